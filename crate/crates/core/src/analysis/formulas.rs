//! Averaged-model results from volt-second and charge balance.
//!
//! Per leg, phase p conducts from the previous ladder tap (the input
//! capacitor for p = 1) through its blocking capacitor for a fraction D of
//! the period and freewheels at `−V_o` otherwise. Volt-second balance on
//! every phase inductor forces consecutive ladder voltages to differ by
//! `V_o/D`, and the freewheel node averages to `V_C1 + V_C2 − V_in = V_o`.
//! Together these give `V_o/V_in = D/(N − D)` and a ladder with uniform
//! steps of `V_in/(N − D)`.

use num_rational::Ratio;

use crate::error::{Error, Result};
use crate::spec::duty_limit;

pub type Exact = Ratio<i128>;

/// Voltage conversion ratio `D/(N − D)`.
pub fn ideal_gain(phases: usize, duty: f64) -> f64 {
    duty / (phases as f64 - duty)
}

/// [`ideal_gain`] in exact arithmetic.
pub fn ideal_gain_exact(phases: usize, duty: Exact) -> Exact {
    duty / (Exact::from_integer(phases as i128) - duty)
}

/// Duty that yields `vo` from `vin`: `D = N·M/(1 + M)` with `M = vo/vin`.
/// Fails when the result is not below `2/N`.
pub fn duty_for_target(phases: usize, vin: f64, vo: f64) -> Result<f64> {
    if !(vo > 0.0 && vin > vo) {
        return Err(Error::InvalidSpec(format!(
            "need 0 < vo < vin, got vo = {vo}, vin = {vin}"
        )));
    }
    let duty = unchecked_duty(phases, vin, vo);
    if duty >= duty_limit(phases) {
        return Err(Error::InvalidSpec(format!(
            "required duty {duty} is outside the valid range (0, {})",
            duty_limit(phases)
        )));
    }
    Ok(duty)
}

/// Inverse gain law without the validity bound.
pub fn unchecked_duty(phases: usize, vin: f64, vo: f64) -> f64 {
    let m = vo / vin;
    phases as f64 * m / (1.0 + m)
}

/// [`duty_for_target`] in exact arithmetic, without the validity check.
pub fn duty_for_gain_exact(phases: usize, gain: Exact) -> Exact {
    Exact::from_integer(phases as i128) * gain / (Exact::from_integer(1) + gain)
}

#[derive(Debug, Clone, PartialEq)]
pub struct FormulaReport {
    pub phases: usize,
    pub vin: f64,
    pub duty: f64,
    pub gain: f64,
    pub v_out: f64,
    pub v_c1: f64,
    pub v_c2: f64,
    /// CB1 … CB(N−2); the first N/2 − 1 belong to leg A.
    pub v_cb: Vec<f64>,
    /// Mean phase inductor current, when a load is known.
    pub phase_current: Option<f64>,
    /// Mean input current, when a load is known.
    pub input_current: Option<f64>,
    pub output_current: Option<f64>,
    /// Peak blocking voltage per switch S1 … SN predicted by the ladder.
    pub switch_stress: Vec<f64>,
    /// Peak reverse voltage per diode D1 … DN.
    pub diode_stress: Vec<f64>,
}

/// Solve the volt-second chain for every capacitor and device stress.
///
/// `V_C1 = V_C2 = (N/2)·V_in/(N−D)`, and ladder capacitor j of a leg holds
/// `(N/2 − j)·V_in/(N−D)`. The first switch of each leg blocks one ladder
/// step, every other switch two; every diode blocks one step.
pub fn stress_formulas(
    phases: usize,
    vin: f64,
    duty: f64,
    load_ohms: Option<f64>,
) -> FormulaReport {
    let n = phases as f64;
    let m = phases / 2;
    let step = vin / (n - duty);
    let gain = ideal_gain(phases, duty);
    let v_out = vin * gain;
    let v_leg = m as f64 * step;
    let ladder: Vec<f64> = (1..m).map(|j| (m - j) as f64 * step).collect();
    let mut v_cb = ladder.clone();
    v_cb.extend(ladder);

    let leg_switches: Vec<f64> = (1..=m)
        .map(|p| if p == 1 { step } else { 2.0 * step })
        .collect();
    let mut switch_stress = leg_switches.clone();
    switch_stress.extend(leg_switches);

    let output_current = load_ohms.map(|r| v_out / r);
    FormulaReport {
        phases,
        vin,
        duty,
        gain,
        v_out,
        v_c1: v_leg,
        v_c2: v_leg,
        v_cb,
        phase_current: output_current.map(|i| i / (n - duty)),
        input_current: output_current.map(|i| i * duty / (n - duty)),
        output_current,
        switch_stress,
        diode_stress: vec![step; phases],
    }
}

impl FormulaReport {
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        s.push_str(&format!(
            "N = {}, Vin = {} V, D = {}\n",
            self.phases, self.vin, self.duty
        ));
        s.push_str(&format!("M = {:.7}\n", self.gain));
        s.push_str(&format!("Vout = {:.4} V\n", self.v_out));
        s.push_str(&format!("V_C = {:.2} V (C1 and C2)\n", self.v_c1));
        for (j, v) in self.v_cb.iter().enumerate() {
            s.push_str(&format!("V_CB{} = {:.2} V\n", j + 1, v));
        }
        if let (Some(ip), Some(ii), Some(io)) =
            (self.phase_current, self.input_current, self.output_current)
        {
            s.push_str(&format!(
                "I_Lo = {io:.4} A\nI_phase = {ip:.4} A\nI_in = {ii:.4} A\n"
            ));
        }
        for (k, v) in self.switch_stress.iter().enumerate() {
            s.push_str(&format!("S{} peak blocking = {:.2} V\n", k + 1, v));
        }
        s.push_str(&format!(
            "diode peak reverse = {:.2} V\n",
            self.diode_stress[0]
        ));
        s
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Verdict {
    pub valid: bool,
    pub limit: f64,
    pub formula_gain: f64,
    pub warning: Option<String>,
}

/// Duty is valid iff below `2/N`. Invalid verdicts still carry the formula
/// gain, with a warning that simulation will not follow it.
pub fn validity_check(phases: usize, duty: f64) -> Verdict {
    let limit = duty_limit(phases);
    let valid = duty > 0.0 && duty < limit;
    let formula_gain = ideal_gain(phases, duty);
    let warning = (!valid).then(|| {
        format!(
            "duty {duty} is outside (0, {limit}) for N = {phases}: the converter leaves the analysed \
             operating modes and the simulated output will diverge from the formula gain {formula_gain:.6}"
        )
    });
    Verdict {
        valid,
        limit,
        formula_gain,
        warning,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gain_examples() {
        assert!((ideal_gain(4, 0.235) - 0.062_416_9).abs() < 1e-7);
        assert!((400.0 * ideal_gain(4, 0.235) - 24.97).abs() < 0.005);
        assert!((ideal_gain(8, 0.24) - 0.030_927_8).abs() < 1e-7);
        assert!((400.0 * ideal_gain(8, 0.24) - 12.37).abs() < 0.005);
        assert_eq!(ideal_gain(8, 0.0), 0.0);
        assert!((800.0 * ideal_gain(4, 0.06) - 12.18).abs() < 0.005);
    }

    #[test]
    fn duty_examples() {
        assert!((duty_for_target(8, 800.0, 12.0).unwrap() - 0.118_227).abs() < 1e-6);
        let d4 = duty_for_target(4, 800.0, 12.0).unwrap();
        assert!((d4 - 0.059_113).abs() < 1e-6);
        assert_eq!((d4 * 100.0).round(), 6.0);
        let d = duty_for_target(8, 400.0, 12.0).unwrap();
        assert!((ideal_gain(8, d) * 400.0 - 12.0).abs() < 1e-12);
        // 350 V cannot reach 12 V below 2/8.
        assert!(duty_for_target(8, 350.0, 12.0).is_err());
        assert!(duty_for_target(8, 10.0, 12.0).is_err());
    }

    #[test]
    fn stress_examples() {
        let r = stress_formulas(8, 400.0, 0.24, None);
        assert!((r.v_c1 - 206.19).abs() < 0.005);
        assert!((r.v_c2 - 206.19).abs() < 0.005);
        let expected = [154.64, 103.09, 51.55, 154.64, 103.09, 51.55];
        for (v, e) in r.v_cb.iter().zip(expected) {
            assert!((v - e).abs() < 0.005, "{v} vs {e}");
        }
        let r = stress_formulas(4, 400.0, 0.235, None);
        assert!((r.v_c1 - 212.48).abs() < 0.005);
        assert!((r.v_cb[0] - 106.24).abs() < 0.005);
        assert!((r.v_cb[1] - 106.24).abs() < 0.005);
        assert!((r.v_cb[0] - r.v_c1 / 2.0).abs() < 1e-12);
    }

    #[test]
    fn small_duty_limit() {
        let r = stress_formulas(8, 400.0, 1e-9, None);
        assert!((r.v_c1 - 200.0).abs() < 1e-6);
        assert!((r.v_cb[0] - 150.0).abs() < 1e-6);
        assert!((r.v_cb[2] - 50.0).abs() < 1e-6);
    }

    #[test]
    fn currents_with_load() {
        let r = stress_formulas(8, 400.0, 0.24, Some(1.0));
        assert!((r.phase_current.unwrap() - 12.371_134 / 7.76).abs() < 1e-5);
        assert!((r.phase_current.unwrap() - 1.594).abs() < 1e-3);
        let io = r.output_current.unwrap();
        assert!((r.input_current.unwrap() - io * 0.24 / 7.76).abs() < 1e-12);
    }

    #[test]
    fn validity_examples() {
        let v = validity_check(4, 0.7);
        assert!(!v.valid);
        assert!((400.0 * v.formula_gain - 84.85).abs() < 0.01);
        assert!(v.warning.is_some());
        assert!(validity_check(8, 0.24).valid);
        assert!(validity_check(4, 0.49).valid);
        assert!(!validity_check(4, 0.5).valid);
    }
}
