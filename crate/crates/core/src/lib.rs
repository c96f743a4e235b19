// SPDX-License-Identifier: Apache-2.0

//! Post-packing interconnect analysis for FPGA netlists based on Rent's rule.

pub mod blif;
pub mod gnl;
pub mod netlist;
pub mod pack;
pub mod partition;
pub mod rent;
pub mod report;
pub mod vprnet;
