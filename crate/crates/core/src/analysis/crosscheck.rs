//! Formula-versus-simulation comparison.

use std::fmt::Write as _;

use crate::engine::{run_to_steady_state, warm_start, SimOptions, SteadyOptions, SteadyState};
use crate::error::Result;
use crate::gates::{interleaved_schedule, GateSchedule};
use crate::spec::ConverterSpec;
use crate::topology::{build_converter, firing_order, state_dimension, Role};

use super::formulas::stress_formulas;
use super::metrics::{steady_metrics, SteadyReport};

/// Interleaved schedule for `spec` with slots alternating between legs.
pub fn converter_schedule(spec: &ConverterSpec) -> Result<GateSchedule> {
    interleaved_schedule(spec.phases, spec.duty, spec.fsw)?
        .with_firing_order(&firing_order(spec.phases))
}

/// Build, warm-start and run `spec` to periodic steady state.
pub fn steady_run(
    spec: &ConverterSpec,
    steps_per_cycle: usize,
    opts: SteadyOptions,
) -> Result<(SteadyState, SteadyReport)> {
    let net = build_converter(spec)?;
    steady_run_with(
        spec,
        &converter_schedule(spec)?,
        steps_per_cycle,
        opts,
        &net,
    )
}

pub(crate) fn steady_run_with(
    spec: &ConverterSpec,
    schedule: &GateSchedule,
    steps_per_cycle: usize,
    opts: SteadyOptions,
    net: &crate::topology::Netlist,
) -> Result<(SteadyState, SteadyReport)> {
    let mut sim = SimOptions::for_netlist(net);
    sim.steps_per_cycle = steps_per_cycle;
    let roles: Vec<Role> = crate::engine::StateLayout::of(net).roles().to_vec();
    debug_assert_eq!(roles.len(), state_dimension(spec));
    let x0 = warm_start(spec, &roles);
    let steady = run_to_steady_state(net, schedule, &x0, sim, opts)?;
    let report = steady_metrics(&steady.trace, spec)?;
    Ok((steady, report))
}

#[derive(Debug, Clone, PartialEq)]
pub struct CrosscheckRow {
    pub name: String,
    pub formula: f64,
    pub simulated: f64,
}

impl CrosscheckRow {
    pub fn rel_error(&self) -> f64 {
        (self.simulated - self.formula).abs() / self.formula.abs()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Crosscheck {
    pub rows: Vec<CrosscheckRow>,
    pub report: SteadyReport,
    pub cycles_used: usize,
}

impl Crosscheck {
    pub fn max_rel_error(&self) -> f64 {
        self.rows
            .iter()
            .map(CrosscheckRow::rel_error)
            .fold(0.0, f64::max)
    }

    pub fn row(&self, name: &str) -> Option<&CrosscheckRow> {
        self.rows.iter().find(|r| r.name == name)
    }

    /// `name,formula_value,simulated_value,rel_error`.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("name,formula_value,simulated_value,rel_error\n");
        for r in &self.rows {
            writeln!(
                s,
                "{},{},{},{}",
                r.name,
                r.formula,
                r.simulated,
                r.rel_error()
            )
            .expect("string write");
        }
        s
    }

    pub fn to_text(&self) -> String {
        let mut s = format!(
            "{:<10} {:>14} {:>14} {:>10}\n",
            "metric", "formula", "simulated", "rel.err"
        );
        for r in &self.rows {
            writeln!(
                s,
                "{:<10} {:>14.6} {:>14.6} {:>9.4}%",
                r.name,
                r.formula,
                r.simulated,
                100.0 * r.rel_error()
            )
            .expect("string write");
        }
        writeln!(s, "steady state reached after {} cycles", self.cycles_used)
            .expect("string write");
        s
    }
}

/// Side-by-side formula and steady-state simulation values.
pub fn crosscheck(
    spec: &ConverterSpec,
    steps_per_cycle: usize,
    opts: SteadyOptions,
) -> Result<Crosscheck> {
    let (steady, report) = steady_run(spec, steps_per_cycle, opts)?;
    let f = stress_formulas(spec.phases, spec.vin, spec.duty, Some(spec.load_ohms));
    let row = |name: String, formula: f64, simulated: f64| CrosscheckRow {
        name,
        formula,
        simulated,
    };
    let mut rows = vec![
        row("gain".into(), f.gain, report.gain),
        row("v_c1".into(), f.v_c1, report.v_c1),
        row("v_c2".into(), f.v_c2, report.v_c2),
    ];
    for (j, (a, b)) in f.v_cb.iter().zip(&report.v_cb).enumerate() {
        rows.push(row(format!("v_cb{}", j + 1), *a, *b));
    }
    let phase = f.phase_current.expect("load given");
    for (k, b) in report.phase_mean.iter().enumerate() {
        rows.push(row(format!("i_l{}", k + 1), phase, *b));
    }
    rows.push(row(
        "i_in".into(),
        f.input_current.expect("load given"),
        report.i_in_mean,
    ));
    Ok(Crosscheck {
        rows,
        report,
        cycles_used: steady.cycles_used,
    })
}
