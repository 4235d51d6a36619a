//! Converter netlist construction and structural checks.

mod build;
mod contract;
mod netlist;
mod search;

pub use build::{
    build_converter, build_with, firing_order, leg_of, state_dimension, Interconnect, LegStyle,
    Terminal,
};
pub use contract::{
    contract_modes, verify_mode_contract, verify_mode_contract_with, ContractOptions,
    ContractReport, ContractRow, ModeCheck,
};
pub use netlist::{
    converter_roles, expected_census, Branch, BranchKind, Census, Netlist, NodeId, Role, GROUND,
};
pub use search::{passing_interconnects, search_interconnect, Candidate};
