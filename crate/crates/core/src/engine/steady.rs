//! Periodic steady-state search.
//!
//! Whole switching cycles are integrated and the state at each cycle
//! boundary compared with the previous one. Because the network is
//! piecewise linear, the cycle map is affine for a fixed sequence of
//! conduction configurations; its Jacobian (the product of the step
//! matrices) is accumulated alongside each cycle and used for a shooting
//! update `x ← x + (I − M)⁻¹·(Φ(x) − x)`. Convergence is still declared
//! only when a plain cycle returns to its own start within tolerance.

use nalgebra::{DMatrix, DVector};

use crate::analysis::formulas::stress_formulas;
use crate::error::{Error, Result};
use crate::gates::GateSchedule;
use crate::spec::ConverterSpec;
use crate::topology::{Netlist, Role};

use super::sim::{Engine, SimOptions};
use super::trace::{StateVector, Trace};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SteadyOptions {
    /// Max-norm relative change between consecutive cycle boundaries.
    pub tol: f64,
    pub max_cycles: usize,
    /// Apply the shooting update between cycles.
    pub shooting: bool,
}

impl Default for SteadyOptions {
    fn default() -> Self {
        SteadyOptions {
            tol: 1e-6,
            max_cycles: 50_000,
            shooting: true,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SteadyState {
    /// One full period starting at the converged cycle boundary.
    pub trace: Trace,
    pub cycles_used: usize,
    /// Relative change of every integrated cycle.
    pub history: Vec<f64>,
    pub state: StateVector,
}

/// Analytic starting point: capacitor voltages from the volt-second chain,
/// `v_Co` at the ideal output, phase currents `I_Lo/(N−D)`, `i_Lo = V_o/R`.
pub fn warm_start(spec: &ConverterSpec, roles: &[Role]) -> StateVector {
    let report = stress_formulas(spec.phases, spec.vin, spec.duty, Some(spec.load_ohms));
    let vo = spec.ideal_vout();
    let mut x = StateVector::zeros(roles.to_vec());
    for &role in roles {
        let value = match role {
            Role::L(_) => report.phase_current.unwrap_or(0.0),
            Role::Lo => vo / spec.load_ohms,
            Role::C1 => report.v_c1,
            Role::C2 => report.v_c2,
            Role::Cb(j) => report.v_cb.get(j - 1).copied().unwrap_or(0.0),
            Role::Co => vo,
            _ => 0.0,
        };
        x.set(role, value);
    }
    x
}

/// Iterate cycles of `netlist` under `schedule` from `x0` until periodic.
pub fn run_to_steady_state(
    netlist: &Netlist,
    schedule: &GateSchedule,
    x0: &StateVector,
    sim: SimOptions,
    opts: SteadyOptions,
) -> Result<SteadyState> {
    let mut engine = Engine::new(netlist, sim);
    steady_with_engine(&mut engine, schedule, x0, opts)
}

/// Same as [`run_to_steady_state`] on an existing engine (keeps its caches).
pub fn steady_with_engine(
    engine: &mut Engine,
    schedule: &GateSchedule,
    x0: &StateVector,
    opts: SteadyOptions,
) -> Result<SteadyState> {
    if !(opts.tol > 0.0) {
        return Err(Error::Trace(format!(
            "tolerance must be > 0, got {}",
            opts.tol
        )));
    }
    let period = schedule.period();
    let roles = engine.state_roles();
    let n = roles.len();
    let mut x = x0.clone();
    let mut history = Vec::new();
    for cycle in 1..=opts.max_cycles {
        let mut run = engine.start(schedule, &x, 0.0)?;
        let mut jac = opts.shooting.then(|| DMatrix::<f64>::identity(n, n));
        engine.run_cycle(&mut run, 0.0, schedule, jac.as_mut(), None, None)?;
        let y = run.state(&roles);
        let change = y.relative_change(&x);
        history.push(change);
        if change < opts.tol {
            let mut trace = engine.new_trace(period);
            let mut run = engine.start(schedule, &x, 0.0)?;
            let saved = engine.options().record_every;
            engine.options_mut().record_every = 1;
            let first = engine.sample(&run.conduction, &run.x, 0.0)?;
            trace.samples.push(first);
            engine.run_cycle(&mut run, 0.0, schedule, None, Some(&mut trace), None)?;
            engine.options_mut().record_every = saved;
            return Ok(SteadyState {
                trace,
                cycles_used: cycle,
                history,
                state: x,
            });
        }
        x = match jac {
            Some(m) => shooting_update(&x, &y, &m).unwrap_or(y),
            None => y,
        };
    }
    Err(Error::NonConvergence {
        cycles: opts.max_cycles,
        history,
    })
}

fn shooting_update(x: &StateVector, y: &StateVector, m: &DMatrix<f64>) -> Option<StateVector> {
    let n = x.len();
    let lhs = DMatrix::<f64>::identity(n, n) - m;
    let residual = DVector::from_iterator(n, y.values().iter().zip(x.values()).map(|(a, b)| a - b));
    let delta = lhs.lu().solve(&residual)?;
    let values: Vec<f64> = x
        .values()
        .iter()
        .zip(delta.iter())
        .map(|(a, d)| a + d)
        .collect();
    if values.iter().any(|v| !v.is_finite()) {
        return None;
    }
    StateVector::new(x.roles().to_vec(), values).ok()
}
