//! Per-mode KVL/KCL contract of the converter family.
//!
//! Each checked configuration is imposed (not resolved): exactly one switch
//! on with its own diode blocking and every other diode conducting, or all
//! switches off with all diodes conducting. The network is solved at
//! seeded random states with near-ideal devices and compared against the
//! ladder relations.

use std::fmt::Write as _;

use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::engine::{Conduction, Network, NetworkSolution};
use crate::error::{Error, Result};
use crate::spec::{ConverterSpec, LossParams};

use super::{Netlist, Role};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ContractOptions {
    pub samples: usize,
    pub seed: u64,
    pub rel_tol: f64,
    /// Device model used for the solves.
    pub model: LossParams,
}

impl Default for ContractOptions {
    fn default() -> Self {
        ContractOptions {
            samples: 3,
            seed: 0x5eed,
            rel_tol: 1e-6,
            model: LossParams {
                r_switch_on: 1e-9,
                v_diode: 0.0,
                r_diode_on: 1e-9,
                r_inductor: 0.0,
                r_cap: 0.0,
                r_off: 1e9,
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ContractRow {
    pub relation: String,
    pub sample: usize,
    pub expected: f64,
    pub observed: f64,
    pub error: f64,
    pub tolerance: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModeCheck {
    /// `"S3 on"` or `"all off"`.
    pub label: String,
    pub conduction: Conduction,
    pub rows: Vec<ContractRow>,
}

impl ModeCheck {
    pub fn passed(&self) -> bool {
        self.rows.iter().all(|r| r.pass)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ContractReport {
    pub phases: usize,
    pub modes: Vec<ModeCheck>,
}

impl ContractReport {
    pub fn passed(&self) -> bool {
        self.modes.iter().all(ModeCheck::passed)
    }

    pub fn failures(&self) -> impl Iterator<Item = (&str, &ContractRow)> {
        self.modes.iter().flat_map(|m| {
            m.rows
                .iter()
                .filter(|r| !r.pass)
                .map(move |r| (m.label.as_str(), r))
        })
    }

    pub fn mode(&self, label: &str) -> Option<&ModeCheck> {
        self.modes.iter().find(|m| m.label == label)
    }

    pub fn row_count(&self) -> usize {
        self.modes.iter().map(|m| m.rows.len()).sum()
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        for m in &self.modes {
            let worst = m
                .rows
                .iter()
                .map(|r| r.error / r.tolerance)
                .fold(0.0, f64::max);
            writeln!(
                s,
                "{:<8} {:>3} rows  {}  worst error/tol = {:.3e}",
                m.label,
                m.rows.len(),
                if m.passed() { "PASS" } else { "FAIL" },
                worst
            )
            .expect("string write");
            for r in m.rows.iter().filter(|r| !r.pass) {
                writeln!(
                    s,
                    "    {} (sample {}): expected {:.9}, observed {:.9}, error {:.3e} > {:.3e}",
                    r.relation, r.sample, r.expected, r.observed, r.error, r.tolerance
                )
                .expect("string write");
            }
        }
        writeln!(
            s,
            "{} relations checked: {}",
            self.row_count(),
            if self.passed() {
                "all pass"
            } else {
                "violations found"
            }
        )
        .expect("string write");
        s
    }
}

struct Probe<'a> {
    network: &'a Network,
    sol: NetworkSolution,
    x: DVector<f64>,
}

impl Probe<'_> {
    fn state(&self, role: Role) -> f64 {
        self.x[self
            .network
            .layout()
            .index_of(role)
            .expect("role has a state")]
    }

    fn inductor_voltage(&self, role: Role) -> f64 {
        let i = self
            .network
            .layout()
            .index_of(role)
            .expect("inductor state");
        self.network.inductor_voltage(&self.sol, i, &self.x)
    }

    fn branch_current(&self, role: Role) -> f64 {
        let b = self
            .network
            .netlist()
            .branch_index(role)
            .expect("branch exists");
        self.sol.branch_currents[b]
    }
}

/// Leg capacitor and ladder capacitors `(before, after)` for phase `k`.
fn ladder_terms(phases: usize, k: usize) -> (Option<Role>, Option<Role>) {
    let m = phases / 2;
    let (leg_cap, p, base) = if k <= m {
        (Role::C1, k, 0)
    } else {
        (Role::C2, k - m, m - 1)
    };
    let before = if p == 1 {
        Some(leg_cap)
    } else {
        Some(Role::Cb(base + p - 1))
    };
    let after = (p < m).then(|| Role::Cb(base + p));
    (before, after)
}

/// The configurations the contract covers, labelled.
pub fn contract_modes(phases: usize) -> Vec<(String, Conduction)> {
    let mut modes: Vec<(String, Conduction)> = (1..=phases)
        .map(|k| {
            let switches = (1..=phases).map(|i| i == k).collect();
            let diodes = (1..=phases).map(|i| i != k).collect();
            (format!("S{k} on"), Conduction::new(switches, diodes))
        })
        .collect();
    modes.push((
        "all off".into(),
        Conduction::new(vec![false; phases], vec![true; phases]),
    ));
    modes
}

/// Check `netlist` against the mode equations of an N-phase converter.
pub fn verify_mode_contract(netlist: &Netlist, spec: &ConverterSpec) -> Result<ContractReport> {
    verify_mode_contract_with(netlist, spec, &ContractOptions::default())
}

pub fn verify_mode_contract_with(
    netlist: &Netlist,
    spec: &ConverterSpec,
    opts: &ContractOptions,
) -> Result<ContractReport> {
    let n = spec.phases;
    netlist.validate_converter(n)?;
    let f = netlist
        .freewheel
        .ok_or_else(|| Error::Structure("freewheel node not marked".into()))?;
    let network = Network::with_model(netlist, opts.model);
    let layout = network.layout();
    let vin = netlist.by_role(Role::Vin).map_or(spec.vin, |b| b.value);

    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let rated = spec.rated_current();
    let states: Vec<DVector<f64>> = (0..opts.samples)
        .map(|_| {
            DVector::from_iterator(
                layout.dimension(),
                layout.roles().iter().map(|r| match r {
                    Role::L(_) | Role::Lo => rng.random_range(0.05..2.0) * rated / n as f64,
                    _ => rng.random_range(0.0..vin),
                }),
            )
        })
        .collect();

    let mut modes = Vec::new();
    for (label, conduction) in contract_modes(n) {
        let sys = network.config_system(&conduction)?;
        let mut rows = Vec::new();
        for (sample, x) in states.iter().enumerate() {
            let probe = Probe {
                network: &network,
                sol: network.expand(&sys, x),
                x: x.clone(),
            };
            let current_sum: f64 = (1..=n).map(|k| probe.state(Role::L(k)).abs()).sum::<f64>()
                + probe.state(Role::Lo).abs();
            let v_tol = opts.rel_tol * vin
                + opts.model.r_switch_on.max(opts.model.r_diode_on) * current_sum;
            let i_tol = opts.rel_tol * current_sum + (2 * n) as f64 * vin / opts.model.r_off;
            let mut push = |relation: String, expected: f64, observed: f64, tolerance: f64| {
                let error = (expected - observed).abs();
                rows.push(ContractRow {
                    relation,
                    sample,
                    expected,
                    observed,
                    error,
                    tolerance,
                    pass: error <= tolerance,
                });
            };

            let v_f = probe.sol.node(f);
            let (v_c1, v_c2) = (probe.state(Role::C1), probe.state(Role::C2));
            let active = conduction.switches.iter().position(|&s| s).map(|i| i + 1);
            for k in 1..=n {
                let observed = probe.inductor_voltage(Role::L(k));
                if Some(k) == active {
                    let (before, after) = ladder_terms(n, k);
                    let expected = before.map_or(0.0, |r| probe.state(r))
                        - after.map_or(0.0, |r| probe.state(r))
                        - v_f;
                    push(format!("V_L{k} ladder"), expected, observed, v_tol);
                } else {
                    push(format!("V_L{k} freewheel"), -v_f, observed, v_tol);
                }
            }
            push("v_f".into(), v_c1 + v_c2 - vin, v_f, v_tol);
            let v_o = probe.state(Role::Co);
            push(
                "V_Lo".into(),
                v_c1 + v_c2 - vin - v_o,
                probe.inductor_voltage(Role::Lo),
                v_tol,
            );
            let i_in = -probe.branch_current(Role::Vin);
            let expected =
                (1..=n).map(|k| probe.state(Role::L(k))).sum::<f64>() - probe.state(Role::Lo);
            push("i_in KCL".into(), expected, i_in, i_tol);
        }
        modes.push(ModeCheck {
            label,
            conduction,
            rows,
        });
    }
    Ok(ContractReport { phases: n, modes })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::topology::{build_converter, build_with, Interconnect, Terminal};

    #[test]
    fn ladder_terms_follow_legs() {
        assert_eq!(ladder_terms(8, 1), (Some(Role::C1), Some(Role::Cb(1))));
        assert_eq!(ladder_terms(8, 3), (Some(Role::Cb(2)), Some(Role::Cb(3))));
        assert_eq!(ladder_terms(8, 4), (Some(Role::Cb(3)), None));
        assert_eq!(ladder_terms(8, 5), (Some(Role::C2), Some(Role::Cb(4))));
        assert_eq!(ladder_terms(8, 8), (Some(Role::Cb(6)), None));
        assert_eq!(ladder_terms(4, 2), (Some(Role::Cb(1)), None));
        assert_eq!(ladder_terms(4, 3), (Some(Role::C2), Some(Role::Cb(2))));
    }

    #[test]
    fn shipped_netlists_pass() {
        for spec in [
            ConverterSpec::table1(0.235),
            ConverterSpec::eight_phase_prototype(),
        ] {
            let net = build_converter(&spec).unwrap();
            let report = verify_mode_contract(&net, &spec).unwrap();
            assert!(report.passed(), "{}", report.to_text());
            assert_eq!(report.modes.len(), spec.phases + 1);
        }
    }

    #[test]
    fn s5_uses_second_leg_ladder() {
        let spec = ConverterSpec::eight_phase_prototype();
        let net = build_converter(&spec).unwrap();
        let report = verify_mode_contract(&net, &spec).unwrap();
        let mode = report.mode("S5 on").unwrap();
        let row = mode
            .rows
            .iter()
            .find(|r| r.relation == "V_L5 ladder")
            .unwrap();
        assert!(row.pass);
    }

    #[test]
    fn reversed_c2_fails() {
        let spec = ConverterSpec::table1(0.235);
        let ic = Interconnect {
            c2: (Terminal::RailB, Terminal::Freewheel),
            ..Interconnect::SHIPPED
        };
        let net = build_with(&spec, &ic);
        let report = verify_mode_contract(&net, &spec).unwrap();
        assert!(!report.passed());
        assert!(report.failures().any(|(_, r)| r.relation == "v_f"));
    }
}
