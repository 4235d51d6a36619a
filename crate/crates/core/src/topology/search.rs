//! Exhaustive search over the input interconnection.

use crate::error::Result;
use crate::spec::ConverterSpec;

use super::build::{build_with, Interconnect, LegStyle, Terminal};
use super::contract::{verify_mode_contract_with, ContractOptions};

#[derive(Debug, Clone, PartialEq)]
pub struct Candidate {
    pub interconnect: Interconnect,
    /// `None` when the network is structurally invalid or singular.
    pub contract_passed: Option<bool>,
}

fn pairs() -> impl Iterator<Item = (Terminal, Terminal)> {
    Terminal::ALL.into_iter().flat_map(|a| {
        Terminal::ALL
            .into_iter()
            .filter(move |&b| b != a)
            .map(move |b| (a, b))
    })
}

/// Every placement of C1, C2 and the source across the four attachment
/// nodes, with both leg styles, checked against the mode contract.
pub fn search_interconnect(spec: &ConverterSpec) -> Result<Vec<Candidate>> {
    spec.validate()?;
    let opts = ContractOptions {
        samples: 1,
        ..ContractOptions::default()
    };
    let mut out = Vec::new();
    for leg_b in [LegStyle::Upright, LegStyle::Mirrored] {
        for vin in pairs() {
            for c1 in pairs() {
                for c2 in pairs() {
                    let ic = Interconnect { c1, c2, vin, leg_b };
                    let net = build_with(spec, &ic);
                    let contract_passed = verify_mode_contract_with(&net, spec, &opts)
                        .ok()
                        .map(|r| r.passed());
                    out.push(Candidate {
                        interconnect: ic,
                        contract_passed,
                    });
                }
            }
        }
    }
    Ok(out)
}

/// The candidates that pass the contract.
pub fn passing_interconnects(spec: &ConverterSpec) -> Result<Vec<Interconnect>> {
    Ok(search_interconnect(spec)?
        .into_iter()
        .filter(|c| c.contract_passed == Some(true))
        .map(|c| c.interconnect)
        .collect())
}
