//! Feed-forward duty regulation from a quantized input-voltage measurement.
//!
//! The input voltage is divided down, converted by an ADC, scaled back up
//! and pushed through the inverted gain law. Duty changes take effect at
//! switching-cycle boundaries only.

use std::fmt::Write as _;
use std::path::Path;

use crate::analysis::{converter_schedule, unchecked_duty};
use crate::engine::{time_average, warm_start, Engine, SimOptions, StateVector, Trace};
use crate::error::{Error, Result};
use crate::spec::{duty_limit, ConverterSpec};
use crate::topology::build_converter;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SensingChain {
    pub divider_ratio: f64,
    pub adc_bits: u32,
    /// Volts at the ADC pin that map to the top code.
    pub full_scale: f64,
    /// Switching cycles between duty updates.
    pub update_period: usize,
}

impl Default for SensingChain {
    fn default() -> Self {
        SensingChain {
            divider_ratio: 101.0,
            adc_bits: 12,
            full_scale: 5.0,
            update_period: 1,
        }
    }
}

impl SensingChain {
    pub fn validate(&self) -> Result<()> {
        if !(self.divider_ratio.is_finite() && self.divider_ratio >= 1.0) {
            return Err(Error::Regulator(format!(
                "divider ratio must be >= 1, got {}",
                self.divider_ratio
            )));
        }
        if !(8..=24).contains(&self.adc_bits) {
            return Err(Error::Regulator(format!(
                "adc bits must be in 8..=24, got {}",
                self.adc_bits
            )));
        }
        if !(self.full_scale.is_finite() && self.full_scale > 0.0) {
            return Err(Error::Regulator(format!(
                "full scale must be > 0, got {}",
                self.full_scale
            )));
        }
        if self.update_period == 0 {
            return Err(Error::Regulator(
                "update period must be at least one cycle".into(),
            ));
        }
        Ok(())
    }

    /// Largest input voltage that does not saturate the converter.
    pub fn range(&self) -> f64 {
        self.divider_ratio * self.full_scale
    }

    pub fn max_code(&self) -> u32 {
        (1u32 << self.adc_bits) - 1
    }

    /// One code step expressed at the input, `divider·full_scale/(2^bits − 1)`.
    pub fn lsb_volts(&self) -> f64 {
        self.range() / self.max_code() as f64
    }

    /// Reject chains that cannot measure `vin_max` without saturating.
    pub fn check_range(&self, vin_max: f64) -> Result<()> {
        if vin_max > self.range() {
            return Err(Error::Regulator(format!(
                "input up to {vin_max} V exceeds the sensing range {} V (divider {} x full scale {} V)",
                self.range(),
                self.divider_ratio,
                self.full_scale
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Sensed {
    pub code: u32,
    /// The pin voltage was outside `[0, full_scale]`.
    pub saturated: bool,
}

/// ADC code for `vin_true`: `round(vin/divider/full_scale·(2^bits − 1))`,
/// clamped to the code range.
pub fn quantize_sense(vin_true: f64, chain: &SensingChain) -> Sensed {
    let max = chain.max_code();
    let raw = (vin_true / chain.divider_ratio / chain.full_scale * max as f64).round();
    if raw.is_nan() || raw < 0.0 {
        Sensed {
            code: 0,
            saturated: true,
        }
    } else if raw > max as f64 {
        Sensed {
            code: max,
            saturated: true,
        }
    } else {
        Sensed {
            code: raw as u32,
            saturated: false,
        }
    }
}

/// Input voltage represented by `code`.
pub fn reconstruct_vin(code: u32, chain: &SensingChain) -> f64 {
    code as f64 / chain.max_code() as f64 * chain.full_scale * chain.divider_ratio
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RegulatorConfig {
    pub vo_target: f64,
    pub duty_min: f64,
    pub duty_max: f64,
    /// Gain of an optional integral trim on the output error, applied as a
    /// relative correction to the feed-forward duty. Zero disables it.
    pub trim_gain: f64,
}

impl RegulatorConfig {
    /// Defaults for `phases`: `duty_max = 2/N − gap`, `duty_min = 0.001`,
    /// no trim.
    pub fn new(phases: usize, vo_target: f64, gap: f64) -> Self {
        RegulatorConfig {
            vo_target,
            duty_min: 1e-3,
            duty_max: duty_limit(phases) - gap,
            trim_gain: 0.0,
        }
    }

    pub fn validate(&self, phases: usize) -> Result<()> {
        if !(self.vo_target > 0.0) {
            return Err(Error::Regulator(format!(
                "target must be > 0, got {}",
                self.vo_target
            )));
        }
        if !(0.0 < self.duty_min
            && self.duty_min < self.duty_max
            && self.duty_max < duty_limit(phases))
        {
            return Err(Error::Regulator(format!(
                "need 0 < duty_min < duty_max < {}, got [{}, {}]",
                duty_limit(phases),
                self.duty_min,
                self.duty_max
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DutyCommand {
    pub duty: f64,
    /// The gain law asked for a duty outside `[duty_min, duty_max]`, or the
    /// estimate was not above the target.
    pub clamped: bool,
}

/// Gain-law duty for `vin_est`, clamped to the configured window.
pub fn compute_duty(phases: usize, vin_est: f64, cfg: &RegulatorConfig) -> DutyCommand {
    if !(vin_est > cfg.vo_target) {
        return DutyCommand {
            duty: cfg.duty_max,
            clamped: true,
        };
    }
    let wanted = unchecked_duty(phases, vin_est, cfg.vo_target);
    let duty = wanted.clamp(cfg.duty_min, cfg.duty_max);
    DutyCommand {
        duty,
        clamped: duty != wanted,
    }
}

/// Piecewise-constant input voltage: each point holds from its time until
/// the next point.
#[derive(Debug, Clone, PartialEq)]
pub struct VinProfile {
    points: Vec<(f64, f64)>,
}

impl VinProfile {
    pub fn new(mut points: Vec<(f64, f64)>) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::Regulator("profile has no points".into()));
        }
        if points
            .iter()
            .any(|&(t, v)| !(t.is_finite() && t >= 0.0 && v.is_finite() && v >= 0.0))
        {
            return Err(Error::Regulator(
                "profile times and voltages must be finite and >= 0".into(),
            ));
        }
        points.sort_by(|a, b| a.0.total_cmp(&b.0));
        Ok(VinProfile { points })
    }

    pub fn constant(vin: f64) -> Self {
        VinProfile {
            points: vec![(0.0, vin)],
        }
    }

    /// `v0` until `t_step`, `v1` afterwards.
    pub fn step(v0: f64, v1: f64, t_step: f64) -> Result<Self> {
        Self::new(vec![(0.0, v0), (t_step, v1)])
    }

    pub fn points(&self) -> &[(f64, f64)] {
        &self.points
    }

    pub fn at(&self, t: f64) -> f64 {
        let i = self.points.partition_point(|&(pt, _)| pt <= t);
        self.points[i.saturating_sub(1)].1
    }

    pub fn max(&self) -> f64 {
        self.points.iter().map(|p| p.1).fold(0.0, f64::max)
    }

    /// Parse `t_seconds,vin_volts` rows. A non-numeric first row is taken as
    /// a header; blank lines and `#` comments are skipped.
    pub fn parse(text: &str) -> Result<Self> {
        let mut points = Vec::new();
        for (index, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split(',').map(str::trim).collect();
            let parsed = match fields.as_slice() {
                [t, v] => t.parse::<f64>().ok().zip(v.parse::<f64>().ok()),
                _ => None,
            };
            match parsed {
                Some(p) => points.push(p),
                None if points.is_empty() && index == 0 => continue,
                None => {
                    return Err(Error::Config {
                        source_name: "profile".into(),
                        line: index + 1,
                        message: format!("expected `t_seconds, vin_volts`, got `{line}`"),
                    })
                }
            }
        }
        Self::new(points)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::parse(&text).map_err(|e| match e {
            Error::Config { line, message, .. } => Error::Config {
                source_name: path.display().to_string(),
                line,
                message,
            },
            other => other,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RegulationUpdate {
    pub t: f64,
    pub vin_true: f64,
    pub code: u32,
    pub vin_est: f64,
    pub duty: f64,
    pub saturated: bool,
    pub clamped: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RegulationTrace {
    pub updates: Vec<RegulationUpdate>,
    /// Mean output voltage of every simulated cycle, `(cycle start, volts)`.
    pub cycle_vout: Vec<(f64, f64)>,
    pub trace: Trace,
}

impl RegulationTrace {
    /// `t,vin_true,code,vin_est,duty`.
    pub fn log_csv(&self) -> String {
        let mut s = String::from("t,vin_true,code,vin_est,duty\n");
        for u in &self.updates {
            writeln!(
                s,
                "{},{},{},{},{}",
                u.t, u.vin_true, u.code, u.vin_est, u.duty
            )
            .expect("string write");
        }
        s
    }

    pub fn saturation_events(&self) -> usize {
        self.updates
            .iter()
            .filter(|u| u.saturated || u.clamped)
            .count()
    }

    /// Cycles after `t` until the cycle-mean output enters `target·(1 ± band)`
    /// and stays there for the rest of the run.
    pub fn settling_cycles(&self, t: f64, target: f64, band: f64) -> Option<usize> {
        let after: Vec<&(f64, f64)> = self
            .cycle_vout
            .iter()
            .filter(|(s, _)| *s >= t - 1e-12)
            .collect();
        let inside = |v: f64| (v - target).abs() <= band * target;
        let last_out = after.iter().rposition(|(_, v)| !inside(*v));
        match last_out {
            None => Some(0),
            Some(i) if i + 1 < after.len() => Some(i + 1),
            Some(_) => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LoopOptions {
    pub cycles: usize,
    pub steps_per_cycle: usize,
    /// Keep every n-th integration step in the returned trace.
    pub record_every: usize,
}

impl Default for LoopOptions {
    fn default() -> Self {
        LoopOptions {
            cycles: 200,
            steps_per_cycle: crate::engine::DEFAULT_STEPS_PER_CYCLE,
            record_every: 40,
        }
    }
}

/// Simulate `spec` with its duty recomputed from the sensed input every
/// `update_period` cycles. Input-voltage changes take effect at the first
/// cycle boundary at or after their time. The run starts from the
/// converter's periodic operating point estimate for the initial input and
/// duty.
pub fn run_closed_loop(
    spec: &ConverterSpec,
    chain: &SensingChain,
    cfg: &RegulatorConfig,
    profile: &VinProfile,
    opts: &LoopOptions,
) -> Result<RegulationTrace> {
    chain.validate()?;
    cfg.validate(spec.phases)?;
    let period = spec.period();
    let vin0 = profile.at(0.0);
    let sensed = quantize_sense(vin0, chain);
    let command = compute_duty(spec.phases, reconstruct_vin(sensed.code, chain), cfg);
    let initial = ConverterSpec {
        vin: vin0,
        duty: command.duty,
        ..spec.clone()
    };
    let net = build_converter(&initial)?;
    let mut sim = SimOptions::for_netlist(&net);
    sim.steps_per_cycle = opts.steps_per_cycle;
    sim.record_every = 1;
    let mut engine = Engine::new(&net, sim);
    let roles = engine.state_roles();
    let x0: StateVector = warm_start(&initial, &roles);
    let mut schedule = converter_schedule(&initial)?;
    let mut run = engine.start(&schedule, &x0, 0.0)?;

    let mut updates = Vec::new();
    let mut cycle_vout = Vec::with_capacity(opts.cycles);
    let mut out = engine.new_trace(period);
    let every = opts.record_every.max(1);
    let mut duty = command.duty;
    let mut integral = 0.0;
    for cycle in 0..opts.cycles {
        let t0 = cycle as f64 * period;
        let vin_true = profile.at(t0 + 1e-9 * period);
        if engine.vin() != Some(vin_true) {
            engine.set_vin(vin_true)?;
            run.conduction = engine.resolve(run.conduction.clone(), &run.x, t0)?;
        }
        if cycle % chain.update_period == 0 {
            let sensed = quantize_sense(vin_true, chain);
            let vin_est = reconstruct_vin(sensed.code, chain);
            let mut command = compute_duty(spec.phases, vin_est, cfg);
            if cfg.trim_gain != 0.0 {
                let trimmed = command.duty * (1.0 + cfg.trim_gain * integral);
                command.duty = trimmed.clamp(cfg.duty_min, cfg.duty_max);
                command.clamped |= command.duty != trimmed;
            }
            if command.duty != duty {
                duty = command.duty;
                schedule = schedule.with_duty(duty)?;
            }
            updates.push(RegulationUpdate {
                t: t0,
                vin_true,
                code: sensed.code,
                vin_est,
                duty,
                saturated: sensed.saturated,
                clamped: command.clamped,
            });
        }
        let mut local = engine.new_trace(period);
        local
            .samples
            .push(engine.sample(&run.conduction, &run.x, t0)?);
        engine.run_cycle(&mut run, t0, &schedule, None, Some(&mut local), None)?;
        let v_mean = time_average(&local.samples, |s| s.v_out);
        integral += (cfg.vo_target - v_mean) / cfg.vo_target;
        cycle_vout.push((t0, v_mean));
        let skip = usize::from(cycle > 0);
        out.samples
            .extend(local.samples.into_iter().skip(skip).step_by(every));
    }
    Ok(RegulationTrace {
        updates,
        cycle_vout,
        trace: out,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quantize_examples() {
        let chain = SensingChain::default();
        assert_eq!(quantize_sense(400.0, &chain).code, 3244);
        assert_eq!(quantize_sense(0.0, &chain).code, 0);
        let s = quantize_sense(505.0, &chain);
        assert_eq!(s.code, 4095);
        let s = quantize_sense(600.0, &chain);
        assert_eq!(
            s,
            Sensed {
                code: 4095,
                saturated: true
            }
        );
        assert!(!quantize_sense(400.0, &chain).saturated);
    }

    #[test]
    fn reconstruct_examples() {
        let chain = SensingChain::default();
        assert!((reconstruct_vin(3244, &chain) - 3244.0 / 4095.0 * 505.0).abs() < 1e-9);
        assert!((reconstruct_vin(3244, &chain) - 400.06).abs() < 0.01);
        assert_eq!(reconstruct_vin(0, &chain), 0.0);
        assert!((chain.lsb_volts() - 0.1233).abs() < 1e-4);
    }

    #[test]
    fn duty_examples() {
        let cfg = RegulatorConfig::new(8, 12.0, 0.01);
        let c = compute_duty(8, 400.06, &cfg);
        assert!((c.duty - 0.23298).abs() < 1e-5);
        assert!(!c.clamped);
        let c = compute_duty(4, 400.0, &RegulatorConfig::new(4, 24.0, 0.01));
        assert!((c.duty - 0.22642).abs() < 1e-5);
        let c = compute_duty(8, 50.0, &cfg);
        assert!(c.clamped);
        assert_eq!(c.duty, cfg.duty_max);
        assert!(compute_duty(8, 10.0, &cfg).clamped);
    }

    #[test]
    fn profile_semantics() {
        let p = VinProfile::step(350.0, 450.0, 1e-3).unwrap();
        assert_eq!(p.at(0.0), 350.0);
        assert_eq!(p.at(0.999e-3), 350.0);
        assert_eq!(p.at(1e-3), 450.0);
        assert_eq!(p.max(), 450.0);
        let p = VinProfile::parse("t_seconds, vin_volts\n0, 400\n# later\n0.002, 420\n").unwrap();
        assert_eq!(p.points(), &[(0.0, 400.0), (0.002, 420.0)]);
        assert!(VinProfile::parse("0, 400\nbad\n").is_err());
    }

    #[test]
    fn chain_validation() {
        let chain = SensingChain::default();
        assert!(chain.check_range(450.0).is_ok());
        assert!(chain.check_range(800.0).is_err());
        let bad = SensingChain {
            adc_bits: 30,
            ..chain
        };
        assert!(bad.validate().is_err());
    }
}
