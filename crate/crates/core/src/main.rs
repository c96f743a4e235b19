// SPDX-License-Identifier: Apache-2.0

use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use rentlens::blif::parse_blif_diag;
use rentlens::gnl::{generate_blif, GenError, GenSpec};
use rentlens::netlist::Netlist;
use rentlens::pack::{pack, write_net, ArchSpec, PackConfig, PackError, SeedPolicy};
use rentlens::partition::{recursive_partition, PartitionConfig};
use rentlens::rent::{analyze, analyze_prepack, collect_points, AnalysisOptions, Region};
use rentlens::report::{
    analysis_document, compare_svg, compare_values, points_csv, prepack_document, report_svg,
    ReportDocument, ReportInputs, COMPARE_METRICS,
};
use rentlens::vprnet::parse_vpr_net;

const EXIT_USAGE: u8 = 2;
const EXIT_ANALYSIS: u8 = 3;

/// Rent's rule analysis of packed FPGA netlists.
#[derive(Parser)]
#[command(name = "rentlens", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Fit Rent parameters and, given a packing, compute density metrics.
    Analyze(AnalyzeArgs),
    /// Compare two packings of the same netlist.
    Compare(CompareArgs),
    /// Generate a synthetic netlist with a target Rent exponent.
    Gen(GenArgs),
    /// Pack a netlist into CLBs and write a `.net` file.
    Pack(PackArgs),
    /// Recursively bipartition a netlist and dump its Rent points.
    Partition(PartitionArgs),
}

#[derive(Args, Clone)]
struct PartitionOpts {
    /// Partitioner seed.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Independent multilevel runs per bisection.
    #[arg(long, default_value_t = 10)]
    restarts: usize,
    /// Allowed side imbalance as a fraction of the node weight.
    #[arg(long, default_value_t = 0.1)]
    balance: f64,
    /// Leave global (clock) nets out of terminal counts.
    #[arg(long, default_value_t = true, action = clap::ArgAction::Set)]
    ignore_globals: bool,
}

impl PartitionOpts {
    fn config(&self) -> PartitionConfig {
        PartitionConfig {
            seed: self.seed,
            restarts: self.restarts,
            balance_epsilon: self.balance,
            ignore_globals: self.ignore_globals,
            ..Default::default()
        }
    }
}

#[derive(Args)]
struct AnalyzeArgs {
    #[arg(long)]
    blif: PathBuf,
    /// Packed netlist in `.net` format.
    #[arg(long)]
    net: Option<PathBuf>,
    /// Architecture file (`key = value` lines).
    #[arg(long)]
    arch: Option<PathBuf>,
    #[command(flatten)]
    part: PartitionOpts,
    /// Shallowest depths left out of the pre-pack and inter-CLB fits.
    #[arg(long, default_value_t = 1)]
    drop_top_depths: usize,
    /// Half-width of the RModerate band around 1.
    #[arg(long, default_value_t = 0.05)]
    tol: f64,
    /// Report destination; `-` for standard output.
    #[arg(long)]
    json: Option<PathBuf>,
    #[arg(long)]
    csv: Option<PathBuf>,
    #[arg(long)]
    svg: Option<PathBuf>,
}

#[derive(Args)]
struct CompareArgs {
    /// Two pre-packing netlists (or one, shared by both packings).
    #[arg(long, num_args = 1)]
    blif: Vec<PathBuf>,
    /// Two packed netlists.
    #[arg(long, num_args = 1)]
    net: Vec<PathBuf>,
    /// Two report files written by `analyze`.
    #[arg(long, num_args = 1, conflicts_with_all = ["blif", "net"])]
    report: Vec<PathBuf>,
    #[arg(long)]
    arch: Option<PathBuf>,
    #[command(flatten)]
    part: PartitionOpts,
    #[arg(long, default_value_t = 1)]
    drop_top_depths: usize,
    #[arg(long, default_value_t = 0.05)]
    tol: f64,
    #[arg(long)]
    svg: Option<PathBuf>,
}

#[derive(Args)]
struct GenArgs {
    #[arg(long)]
    blocks: usize,
    /// Target Rent exponent in (0, 1].
    #[arg(long)]
    rent: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Pins per LUT (inputs plus one output).
    #[arg(long, default_value_t = 5)]
    t_block: usize,
    #[arg(long, default_value_t = 0.0)]
    latch_fraction: f64,
    /// Output BLIF; standard output when absent.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct PackArgs {
    #[arg(long)]
    blif: PathBuf,
    #[arg(long)]
    arch: Option<PathBuf>,
    /// Target fraction of CLB input pins in use.
    #[arg(long, default_value_t = 1.0)]
    pin_util: f64,
    #[arg(long, value_enum, default_value_t = SeedPolicy::MostPins)]
    seed_policy: SeedPolicy,
    #[arg(long)]
    allow_unrelated: bool,
    #[arg(long, default_value_t = 0)]
    rng_seed: u64,
    /// Output `.net`; standard output when absent.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct PartitionArgs {
    #[arg(long)]
    blif: PathBuf,
    #[command(flatten)]
    part: PartitionOpts,
    #[arg(long, default_value_t = 1)]
    drop_top_depths: usize,
    /// CSV of all Rent points.
    #[arg(long)]
    points: Option<PathBuf>,
}

/// Error carrying its process exit code.
struct Failure {
    code: u8,
    message: String,
}

fn usage(message: impl Into<String>) -> Failure {
    Failure {
        code: EXIT_USAGE,
        message: message.into(),
    }
}

fn analysis(message: impl std::fmt::Display) -> Failure {
    Failure {
        code: EXIT_ANALYSIS,
        message: message.to_string(),
    }
}

type CliResult<T> = Result<T, Failure>;

fn read_input(path: &Path) -> CliResult<Vec<u8>> {
    fs::read(path).map_err(|e| usage(format!("{}: {e}", path.display())))
}

fn write_output(path: Option<&Path>, text: &str) -> CliResult<()> {
    match path {
        None => Ok(()),
        Some(p) if p == Path::new("-") => std::io::stdout()
            .write_all(text.as_bytes())
            .map_err(|e| analysis(format!("stdout: {e}"))),
        Some(p) => fs::write(p, text).map_err(|e| analysis(format!("{}: {e}", p.display()))),
    }
}

fn load_blif(path: &Path) -> CliResult<(Netlist, Vec<String>)> {
    let bytes = read_input(path)?;
    let (netlist, warnings) =
        parse_blif_diag(&bytes).map_err(|e| usage(format!("{}: {e}", path.display())))?;
    let warnings = warnings.iter().map(|w| format!("{}: {w}", path.display())).collect();
    Ok((netlist, warnings))
}

fn load_arch(path: Option<&Path>) -> CliResult<ArchSpec> {
    match path {
        None => Ok(ArchSpec::default()),
        Some(p) => {
            let text = String::from_utf8_lossy(&read_input(p)?).into_owned();
            ArchSpec::from_toml(&text).map_err(|e| usage(format!("{}: {e}", p.display())))
        }
    }
}

fn analysis_opts(drop: usize, tol: f64) -> CliResult<AnalysisOptions> {
    if !(tol >= 0.0) {
        return Err(usage("--tol must be >= 0"));
    }
    Ok(AnalysisOptions {
        drop_top_depths_prepack: drop,
        drop_top_depths_inter: drop,
        tol,
        ..Default::default()
    })
}

fn check_config(cfg: &PartitionConfig) -> CliResult<()> {
    cfg.validate().map_err(|e| usage(e.to_string()))
}

fn run_analysis(
    blif: &Path,
    net: Option<&Path>,
    arch: &ArchSpec,
    cfg: &PartitionConfig,
    opts: &AnalysisOptions,
) -> CliResult<ReportDocument> {
    let (netlist, mut warnings) = load_blif(blif)?;
    let blif_path = blif.display().to_string();
    let net_path = net.map(|p| p.display().to_string());
    match net {
        None => {
            let pre = analyze_prepack(&netlist, cfg, opts).map_err(analysis)?;
            let inputs = ReportInputs {
                blif_path: &blif_path,
                net_path: None,
                netlist: &netlist,
                partition: cfg,
                analysis: opts,
                arch: None,
                warnings,
            };
            Ok(prepack_document(inputs, &pre))
        }
        Some(net) => {
            let parsed = parse_vpr_net(&read_input(net)?, &netlist)
                .map_err(|e| usage(format!("{}: {e}", net.display())))?;
            warnings.extend(parsed.warnings.iter().map(|w| format!("{}: {w}", net.display())));
            let a = analyze(&netlist, &parsed.cluster_map, arch, cfg, opts).map_err(analysis)?;
            let inputs = ReportInputs {
                blif_path: &blif_path,
                net_path: net_path.as_deref(),
                netlist: &netlist,
                partition: cfg,
                analysis: opts,
                arch: Some(arch),
                warnings,
            };
            Ok(analysis_document(inputs, &a))
        }
    }
}

fn summary(doc: &ReportDocument) -> String {
    let mut s = format!(
        "pre-pack: {} logic blocks, t = {:.4}, r = {:.4}\n",
        doc.prepack.n_logic_blocks, doc.prepack.t, doc.prepack.fit.r
    );
    if let Some(d) = &doc.density {
        let opt = |v: Option<f64>| v.map_or("n/a".to_string(), |v| format!("{v:.4}"));
        s += &format!(
            "r_intra = {}, r_inter = {}\nB_avg = {:.4}, T_avg = {:.4}, B* = {:.4}\nD_R = {:.4} ({:?}), D_B = {:.4}, D_T = {:.4}\n",
            opt(d.r_intra),
            opt(d.r_inter),
            d.b_avg,
            d.t_avg,
            d.b_star,
            d.d_r,
            d.classification,
            d.d_b,
            d.d_t
        );
    }
    s
}

fn cmd_analyze(a: AnalyzeArgs) -> CliResult<()> {
    let cfg = a.part.config();
    check_config(&cfg)?;
    let opts = analysis_opts(a.drop_top_depths, a.tol)?;
    let arch = load_arch(a.arch.as_deref())?;
    let doc = run_analysis(&a.blif, a.net.as_deref(), &arch, &cfg, &opts)?;
    for w in &doc.warnings {
        eprintln!("warning: {w}");
    }
    write_output(a.json.as_deref(), &doc.to_json())?;
    write_output(a.csv.as_deref(), &points_csv(&doc.points))?;
    write_output(a.svg.as_deref(), &report_svg(&doc))?;
    if a.json.as_deref() != Some(Path::new("-")) {
        print!("{}", summary(&doc));
    }
    Ok(())
}

fn cmd_compare(a: CompareArgs) -> CliResult<()> {
    let cfg = a.part.config();
    check_config(&cfg)?;
    let opts = analysis_opts(a.drop_top_depths, a.tol)?;
    let (labels, docs): (Vec<String>, Vec<ReportDocument>) = if !a.report.is_empty() {
        if a.report.len() != 2 {
            return Err(usage("compare needs exactly two --report files"));
        }
        let mut docs = Vec::new();
        for p in &a.report {
            let text = String::from_utf8_lossy(&read_input(p)?).into_owned();
            docs.push(
                ReportDocument::from_json(&text)
                    .map_err(|e| usage(format!("{}: {e}", p.display())))?,
            );
        }
        (a.report.iter().map(|p| p.display().to_string()).collect(), docs)
    } else {
        if a.net.len() != 2 || !(a.blif.len() == 1 || a.blif.len() == 2) {
            return Err(usage(
                "compare needs two --net files and one or two --blif files",
            ));
        }
        let arch = load_arch(a.arch.as_deref())?;
        let blifs = [&a.blif[0], a.blif.last().unwrap()];
        let mut docs = Vec::new();
        for (blif, net) in blifs.iter().zip(&a.net) {
            docs.push(run_analysis(blif, Some(net), &arch, &cfg, &opts)?);
        }
        (a.net.iter().map(|p| p.display().to_string()).collect(), docs)
    };
    if docs[0].inputs.prepack_fingerprint != docs[1].inputs.prepack_fingerprint {
        return Err(usage("incomparable inputs: the pre-packing netlists differ"));
    }
    let (Some(da), Some(db)) = (&docs[0].density, &docs[1].density) else {
        return Err(usage("compare needs reports with packing metrics"));
    };
    let (va, vb) = (compare_values(da), compare_values(db));
    let cell = |v: Option<f64>| v.map_or("n/a".to_string(), |v| format!("{v:.4}"));
    println!("{:<8} {:>12} {:>12} {:>12}", "metric", "A", "B", "B - A");
    for (i, name) in COMPARE_METRICS.iter().enumerate() {
        let delta = va[i].zip(vb[i]).map(|(x, y)| y - x);
        println!(
            "{:<8} {:>12} {:>12} {:>12}",
            name,
            cell(va[i]),
            cell(vb[i]),
            cell(delta)
        );
    }
    println!("A = {}\nB = {}", labels[0], labels[1]);
    write_output(
        a.svg.as_deref(),
        &compare_svg([labels[0].as_str(), labels[1].as_str()], da, db),
    )
}

fn cmd_gen(a: GenArgs) -> CliResult<()> {
    let spec = GenSpec {
        n_blocks: a.blocks,
        target_r: a.rent,
        t_block: a.t_block,
        seed: a.seed,
        latch_fraction: a.latch_fraction,
    };
    let text = generate_blif(&spec).map_err(|e| match e {
        GenError::InvalidSpec(_) => usage(e.to_string()),
        e => analysis(e),
    })?;
    match a.out {
        Some(p) => write_output(Some(&p), &text),
        None => write_output(Some(Path::new("-")), &text),
    }
}

fn cmd_pack(a: PackArgs) -> CliResult<()> {
    let (netlist, warnings) = load_blif(&a.blif)?;
    for w in &warnings {
        eprintln!("warning: {w}");
    }
    let arch = load_arch(a.arch.as_deref())?;
    let cfg = PackConfig {
        target_ext_pin_util: a.pin_util,
        seed_policy: a.seed_policy,
        allow_unrelated: a.allow_unrelated,
        rng_seed: a.rng_seed,
    };
    let result = pack(&netlist, &arch, &cfg).map_err(|e| match e {
        PackError::InvalidConfig(_) | PackError::InvalidArch(_) => usage(e.to_string()),
        e => analysis(e),
    })?;
    for d in &result.diagnostics {
        eprintln!("note: {d}");
    }
    let clbs = result.cluster_map.of_kind("clb").count();
    eprintln!(
        "packed {} logic blocks into {clbs} clusters",
        netlist.n_logic()
    );
    let text = write_net(&result.cluster_map, &netlist, &arch);
    write_output(Some(a.out.as_deref().unwrap_or(Path::new("-"))), &text)
}

fn cmd_partition(a: PartitionArgs) -> CliResult<()> {
    let cfg = a.part.config();
    check_config(&cfg)?;
    let (netlist, _) = load_blif(&a.blif)?;
    let tree = recursive_partition(&netlist, &cfg).map_err(analysis)?;
    let points = collect_points(&tree, Region::Prepack).map_err(analysis)?;
    println!(
        "{} nodes, height {}, root B = {}, T = {}",
        tree.node_count(),
        tree.height(),
        tree.b,
        tree.t
    );
    match rentlens::rent::fit_rent(&points, a.drop_top_depths) {
        Ok(f) => println!("fit: t = {:.4}, r = {:.4}", f.t, f.r),
        Err(e) => println!("fit: {e}"),
    }
    write_output(a.points.as_deref(), &points_csv(&points))
}

fn init_threads() -> CliResult<()> {
    let Ok(v) = std::env::var("RENTLENS_THREADS") else {
        return Ok(());
    };
    let n: usize = v
        .parse()
        .ok()
        .filter(|&n| n >= 1)
        .ok_or_else(|| usage(format!("RENTLENS_THREADS must be a positive integer, got `{v}`")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(analysis)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = init_threads().and_then(|()| match cli.command {
        Command::Analyze(a) => cmd_analyze(a),
        Command::Compare(a) => cmd_compare(a),
        Command::Gen(a) => cmd_gen(a),
        Command::Pack(a) => cmd_pack(a),
        Command::Partition(a) => cmd_partition(a),
    });
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
