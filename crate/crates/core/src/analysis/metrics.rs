//! Cycle-averaged metrics extracted from a simulated trace.

use crate::engine::{time_average, Sample, Trace};
use crate::error::{Error, Result};
use crate::spec::ConverterSpec;
use crate::topology::Role;

/// Input current counts as continuous when its minimum over the cycle
/// exceeds this fraction of its mean.
pub const CONTINUITY_FRACTION: f64 = 1e-3;

#[derive(Debug, Clone, PartialEq)]
pub struct Residuals {
    /// Mean voltage across each inductance.
    pub inductors: Vec<(Role, f64)>,
    /// Mean current into each capacitor.
    pub capacitors: Vec<(Role, f64)>,
}

impl Residuals {
    pub fn max_inductor(&self) -> f64 {
        self.inductors
            .iter()
            .map(|(_, v)| v.abs())
            .fold(0.0, f64::max)
    }

    pub fn max_capacitor(&self) -> f64 {
        self.capacitors
            .iter()
            .map(|(_, v)| v.abs())
            .fold(0.0, f64::max)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SteadyReport {
    pub phases: usize,
    pub vin: f64,
    pub duty: f64,
    pub v_out_mean: f64,
    pub v_out_pp: f64,
    pub gain: f64,
    pub i_lo_mean: f64,
    pub phase_mean: Vec<f64>,
    pub phase_ripple: Vec<f64>,
    /// `(max − min)/mean` of the per-phase mean currents.
    pub sharing_spread: f64,
    pub i_in_mean: f64,
    pub i_in_min: f64,
    pub i_in_max: f64,
    pub continuous: bool,
    pub switch_peak: Vec<f64>,
    pub diode_peak: Vec<f64>,
    pub v_c1: f64,
    pub v_c2: f64,
    pub v_cb: Vec<f64>,
    pub v_co: f64,
    pub p_in: f64,
    pub p_out: f64,
    pub p_diss: f64,
    pub efficiency: f64,
    /// `(p_in − p_out − p_diss)/p_in`.
    pub energy_mismatch: f64,
    pub residuals: Residuals,
}

fn peak(samples: &[Sample], f: impl Fn(&Sample) -> f64) -> f64 {
    samples.iter().map(f).fold(f64::NEG_INFINITY, f64::max)
}

fn trough(samples: &[Sample], f: impl Fn(&Sample) -> f64) -> f64 {
    samples.iter().map(f).fold(f64::INFINITY, f64::min)
}

fn state_mean(trace: &Trace, samples: &[Sample], role: Role) -> Result<f64> {
    let i = trace
        .state_index(role)
        .ok_or_else(|| Error::Trace(format!("trace has no state for {role}")))?;
    Ok(time_average(samples, |s| s.x[i]))
}

/// Mean inductor voltage and capacitor current over the final cycle.
pub fn vsb_charge_residuals(trace: &Trace) -> Result<Residuals> {
    let samples = trace.final_cycle()?;
    let inductors: Vec<Role> = trace
        .state_roles
        .iter()
        .copied()
        .filter(|r| matches!(r, Role::L(_) | Role::Lo))
        .collect();
    let capacitors: Vec<Role> = trace
        .state_roles
        .iter()
        .copied()
        .filter(|r| matches!(r, Role::C1 | Role::C2 | Role::Cb(_) | Role::Co))
        .collect();
    Ok(Residuals {
        inductors: inductors
            .iter()
            .enumerate()
            .map(|(k, &r)| (r, time_average(samples, |s| s.v_ind[k])))
            .collect(),
        capacitors: capacitors
            .iter()
            .enumerate()
            .map(|(k, &r)| (r, time_average(samples, |s| s.i_cap[k])))
            .collect(),
    })
}

/// Metrics over the final full cycle of `trace`.
pub fn steady_metrics(trace: &Trace, spec: &ConverterSpec) -> Result<SteadyReport> {
    let samples = trace.final_cycle()?;
    let n = spec.phases;
    let mean = |role| state_mean(trace, samples, role);

    let mut phase_mean = Vec::with_capacity(n);
    let mut phase_ripple = Vec::with_capacity(n);
    for k in 1..=n {
        let i = trace
            .state_index(Role::L(k))
            .ok_or_else(|| Error::Trace(format!("trace has no state for L{k}")))?;
        phase_mean.push(time_average(samples, |s| s.x[i]));
        phase_ripple.push(peak(samples, |s| s.x[i]) - trough(samples, |s| s.x[i]));
    }
    let avg_phase = phase_mean.iter().sum::<f64>() / n as f64;
    let spread = phase_mean.iter().fold(f64::NEG_INFINITY, |a, &b| a.max(b))
        - phase_mean.iter().fold(f64::INFINITY, |a, &b| a.min(b));

    let v_out_mean = time_average(samples, |s| s.v_out);
    let i_in_mean = time_average(samples, |s| s.i_in);
    let i_in_min = trough(samples, |s| s.i_in);
    let p_in = time_average(samples, |s| s.p_in);
    let p_out = time_average(samples, |s| s.p_out);
    let p_diss = time_average(samples, |s| s.p_diss);

    Ok(SteadyReport {
        phases: n,
        vin: spec.vin,
        duty: spec.duty,
        v_out_mean,
        v_out_pp: peak(samples, |s| s.v_out) - trough(samples, |s| s.v_out),
        gain: v_out_mean / spec.vin,
        i_lo_mean: mean(Role::Lo)?,
        phase_mean,
        phase_ripple,
        sharing_spread: spread / avg_phase.abs(),
        i_in_mean,
        i_in_min,
        i_in_max: peak(samples, |s| s.i_in),
        continuous: i_in_min > CONTINUITY_FRACTION * i_in_mean,
        switch_peak: (0..trace.switches)
            .map(|k| peak(samples, |s| s.v_sw[k]))
            .collect(),
        diode_peak: (0..trace.diodes)
            .map(|k| peak(samples, |s| s.v_dio[k]))
            .collect(),
        v_c1: mean(Role::C1)?,
        v_c2: mean(Role::C2)?,
        v_cb: (1..=n.saturating_sub(2))
            .map(|j| mean(Role::Cb(j)))
            .collect::<Result<_>>()?,
        v_co: mean(Role::Co)?,
        p_in,
        p_out,
        p_diss,
        efficiency: p_out / p_in,
        energy_mismatch: (p_in - p_out - p_diss) / p_in,
        residuals: vsb_charge_residuals(trace)?,
    })
}

impl SteadyReport {
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        s.push_str(&format!(
            "Vout mean = {:.4} V, ripple = {:.4} V pp, gain = {:.7}\n",
            self.v_out_mean, self.v_out_pp, self.gain
        ));
        s.push_str(&format!("I_Lo mean = {:.4} A\n", self.i_lo_mean));
        for (k, (m, r)) in self.phase_mean.iter().zip(&self.phase_ripple).enumerate() {
            s.push_str(&format!(
                "I_L{} mean = {m:.4} A, ripple = {r:.4} A pp\n",
                k + 1
            ));
        }
        s.push_str(&format!(
            "sharing spread = {:.3}%\n",
            100.0 * self.sharing_spread
        ));
        s.push_str(&format!(
            "I_in mean = {:.4} A, min = {:.4} A, max = {:.4} A, {}\n",
            self.i_in_mean,
            self.i_in_min,
            self.i_in_max,
            if self.continuous {
                "continuous"
            } else {
                "discontinuous"
            }
        ));
        for (k, v) in self.switch_peak.iter().enumerate() {
            s.push_str(&format!("S{} peak = {v:.2} V\n", k + 1));
        }
        for (k, v) in self.diode_peak.iter().enumerate() {
            s.push_str(&format!("D{} peak reverse = {v:.2} V\n", k + 1));
        }
        s.push_str(&format!(
            "V_C1 = {:.2} V, V_C2 = {:.2} V\n",
            self.v_c1, self.v_c2
        ));
        for (j, v) in self.v_cb.iter().enumerate() {
            s.push_str(&format!("V_CB{} = {v:.2} V\n", j + 1));
        }
        s.push_str(&format!(
            "P_in = {:.3} W, P_out = {:.3} W, P_diss = {:.4} W, efficiency = {:.4}%\n",
            self.p_in,
            self.p_out,
            self.p_diss,
            100.0 * self.efficiency
        ));
        s.push_str(&format!(
            "max |mean V_L| = {:.3e} V, max |mean i_C| = {:.3e} A\n",
            self.residuals.max_inductor(),
            self.residuals.max_capacitor()
        ));
        s
    }
}
