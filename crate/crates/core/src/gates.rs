//! Interleaved PWM gate schedules.
//!
//! Edge positions are exact rationals of the period so that a schedule
//! replayed for thousands of cycles lands every edge on the same fraction.
//! On-intervals are half-open, `[start, start + duty)`.

use num_rational::Ratio;
use num_traits::{One, ToPrimitive, Zero};

use crate::error::{Error, Result};

/// A fraction of the switching period.
pub type Frac = Ratio<i64>;

const FRAC_DENOM: i64 = 1_000_000_000;

/// Nearest multiple of 1e−9 (config values are decimal, so this is exact
/// for them).
pub fn frac_from_f64(x: f64) -> Frac {
    Ratio::new((x * FRAC_DENOM as f64).round() as i64, FRAC_DENOM)
}

pub fn frac_to_f64(q: Frac) -> f64 {
    q.to_f64().unwrap_or(f64::NAN)
}

fn wrap(q: Frac) -> Frac {
    let w = q - q.floor();
    if w < Frac::zero() {
        w + Frac::one()
    } else {
        w
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GateSchedule {
    period: f64,
    duty: Frac,
    offsets: Vec<Frac>,
    gap: Frac,
}

impl GateSchedule {
    /// Build from explicit parts. Offsets are wrapped into `[0, 1)`.
    pub fn from_parts(period: f64, duty: Frac, offsets: Vec<Frac>, gap: Frac) -> Result<Self> {
        if !(period > 0.0 && period.is_finite()) {
            return Err(Error::Gates(format!("period must be > 0, got {period}")));
        }
        if duty < Frac::zero() || duty >= Frac::one() {
            return Err(Error::Gates(format!(
                "duty must lie in [0, 1), got {}",
                frac_to_f64(duty)
            )));
        }
        Ok(GateSchedule {
            period,
            duty,
            offsets: offsets.into_iter().map(wrap).collect(),
            gap,
        })
    }

    pub fn period(&self) -> f64 {
        self.period
    }

    pub fn duty(&self) -> f64 {
        frac_to_f64(self.duty)
    }

    pub fn duty_frac(&self) -> Frac {
        self.duty
    }

    pub fn gap(&self) -> f64 {
        frac_to_f64(self.gap)
    }

    pub fn switches(&self) -> usize {
        self.offsets.len()
    }

    /// Start offset of switch `k` (1-based) as a fraction of the period.
    pub fn offset(&self, k: usize) -> Frac {
        self.offsets[k - 1]
    }

    /// Turn-on time of switch `k` (1-based) within the period, in seconds.
    pub fn turn_on_time(&self, k: usize) -> f64 {
        frac_to_f64(self.offset(k)) * self.period
    }

    /// On-interval of switch `k` in seconds; the end may exceed the period
    /// when the interval wraps.
    pub fn on_interval(&self, k: usize) -> (f64, f64) {
        let start = self.turn_on_time(k);
        (start, start + self.duty() * self.period)
    }

    /// Same schedule with `S(order[i])` placed in slot `i`, i.e. starting at
    /// `i/N` of the period.
    pub fn with_firing_order(&self, order: &[usize]) -> Result<Self> {
        let n = self.offsets.len();
        let mut sorted = order.to_vec();
        sorted.sort_unstable();
        if sorted != (1..=n).collect::<Vec<_>>() {
            return Err(Error::Gates(format!(
                "firing order {order:?} is not a permutation of 1..={n}"
            )));
        }
        let mut offsets = vec![Frac::zero(); n];
        for (slot, &k) in order.iter().enumerate() {
            offsets[k - 1] = Ratio::new(slot as i64, n as i64);
        }
        Ok(GateSchedule {
            offsets,
            ..self.clone()
        })
    }

    /// Same offsets with a different duty.
    pub fn with_duty(&self, duty: f64) -> Result<Self> {
        Self::from_parts(
            self.period,
            frac_from_f64(duty),
            self.offsets.clone(),
            self.gap,
        )
    }

    pub fn is_on_at_frac(&self, k: usize, q: Frac) -> bool {
        wrap(q - self.offset(k)) < self.duty
    }

    /// Switch states at fraction `q` of the period, exact.
    pub fn states_at_frac(&self, q: Frac) -> Vec<bool> {
        let q = wrap(q);
        (1..=self.offsets.len())
            .map(|k| self.is_on_at_frac(k, q))
            .collect()
    }

    /// Switch states at absolute time `t ≥ 0`.
    pub fn states_at(&self, t: f64) -> Vec<bool> {
        let cycles = t / self.period;
        let mut frac = cycles - cycles.floor();
        // Snap values that round to a whole period back to zero.
        if 1.0 - frac < 1e-12 {
            frac = 0.0;
        }
        let d = self.duty();
        self.offsets
            .iter()
            .map(|&o| {
                let mut rel = frac - frac_to_f64(o);
                if rel < 0.0 {
                    rel += 1.0;
                }
                rel < d
            })
            .collect()
    }

    /// Every distinct turn-on / turn-off fraction within `[0, 1)`, sorted.
    pub fn edges(&self) -> Vec<Frac> {
        let mut edges = Vec::with_capacity(2 * self.offsets.len());
        if self.duty > Frac::zero() {
            for &o in &self.offsets {
                edges.push(o);
                edges.push(wrap(o + self.duty));
            }
        }
        edges.sort();
        edges.dedup();
        edges
    }

    pub fn signal(&self, k: usize) -> PwmSignal {
        PwmSignal::window(self.period, self.offset(k), self.duty)
    }

    /// Largest number of simultaneously conducting switches.
    pub fn max_overlap(&self) -> usize {
        let mut points = self.edges();
        points.push(Frac::zero());
        points
            .iter()
            .map(|&q| self.states_at_frac(q).into_iter().filter(|&s| s).count())
            .max()
            .unwrap_or(0)
    }
}

/// `N` switches sharing one duty, switch `k` starting at `(k−1)/N` of the
/// period.
pub fn interleaved_schedule(phases: usize, duty: f64, fsw: f64) -> Result<GateSchedule> {
    if phases == 0 {
        return Err(Error::Gates("at least one switch is required".into()));
    }
    if !(0.0..1.0).contains(&duty) {
        return Err(Error::Gates(format!("duty must lie in [0, 1), got {duty}")));
    }
    if !(fsw > 0.0) {
        return Err(Error::Gates(format!("fsw must be > 0, got {fsw}")));
    }
    let offsets = (0..phases)
        .map(|k| Ratio::new(k as i64, phases as i64))
        .collect();
    GateSchedule::from_parts(1.0 / fsw, frac_from_f64(duty), offsets, Frac::zero())
}

/// Switches fired strictly one after another with an off gap of
/// `gap_fraction` between consecutive on-states: duty `1/N − gap`.
pub fn sequential_schedule(phases: usize, gap_fraction: f64, fsw: f64) -> Result<GateSchedule> {
    if phases == 0 {
        return Err(Error::Gates("at least one switch is required".into()));
    }
    let slot = Ratio::new(1, phases as i64);
    let gap = frac_from_f64(gap_fraction);
    if gap < Frac::zero() || gap >= slot {
        return Err(Error::Gates(format!(
            "gap fraction {gap_fraction} must lie in [0, 1/{phases})"
        )));
    }
    if !(fsw > 0.0) {
        return Err(Error::Gates(format!("fsw must be > 0, got {fsw}")));
    }
    let offsets = (0..phases)
        .map(|k| Ratio::new(k as i64, phases as i64))
        .collect();
    GateSchedule::from_parts(1.0 / fsw, slot - gap, offsets, gap)
}

/// A periodic logic signal: disjoint sorted on-intervals within `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct PwmSignal {
    pub period: f64,
    intervals: Vec<(Frac, Frac)>,
}

impl PwmSignal {
    /// On for `length` starting at `start`, wrapping past the period end.
    pub fn window(period: f64, start: Frac, length: Frac) -> Self {
        let start = wrap(start);
        let end = start + length;
        let mut intervals = Vec::new();
        if length >= Frac::one() {
            intervals.push((Frac::zero(), Frac::one()));
        } else if length > Frac::zero() {
            if end <= Frac::one() {
                intervals.push((start, end));
            } else {
                intervals.push((Frac::zero(), end - Frac::one()));
                intervals.push((start, Frac::one()));
            }
        }
        PwmSignal { period, intervals }
    }

    pub fn empty(period: f64) -> Self {
        PwmSignal {
            period,
            intervals: Vec::new(),
        }
    }

    pub fn intervals(&self) -> &[(Frac, Frac)] {
        &self.intervals
    }

    pub fn is_empty(&self) -> bool {
        self.intervals.is_empty()
    }

    pub fn on_fraction(&self) -> Frac {
        self.intervals
            .iter()
            .fold(Frac::zero(), |acc, (a, b)| acc + (b - a))
    }

    pub fn is_on(&self, q: Frac) -> bool {
        let q = wrap(q);
        self.intervals.iter().any(|&(a, b)| a <= q && q < b)
    }
}

/// Pointwise logical AND of two signals with the same period.
pub fn and_compose(a: &PwmSignal, b: &PwmSignal) -> Result<PwmSignal> {
    if (a.period - b.period).abs() > 1e-12 * a.period.abs().max(b.period.abs()) {
        return Err(Error::Gates(format!(
            "period mismatch: {} s vs {} s",
            a.period, b.period
        )));
    }
    let mut intervals = Vec::new();
    for &(a0, a1) in &a.intervals {
        for &(b0, b1) in &b.intervals {
            let lo = a0.max(b0);
            let hi = a1.min(b1);
            if lo < hi {
                intervals.push((lo, hi));
            }
        }
    }
    intervals.sort();
    Ok(PwmSignal {
        period: a.period,
        intervals,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn q(n: i64, d: i64) -> Frac {
        Ratio::new(n, d)
    }

    #[test]
    fn interleaved_offsets() {
        let s = interleaved_schedule(4, 0.235, 30e3).unwrap();
        assert!((s.period() - 33.333_333e-6).abs() < 1e-11);
        assert!((s.turn_on_time(2) - 8.333_333e-6).abs() < 1e-11);
        let s = interleaved_schedule(8, 0.24, 30e3).unwrap();
        assert!((s.turn_on_time(5) - 16.666_667e-6).abs() < 1e-11);
        let s = interleaved_schedule(4, 0.0, 30e3).unwrap();
        assert!(s.edges().is_empty());
        assert!(s.states_at(1e-6).iter().all(|&on| !on));
    }

    #[test]
    fn sequential_duties() {
        assert_eq!(
            sequential_schedule(4, 0.015, 30e3).unwrap().duty_frac(),
            q(235, 1000)
        );
        assert_eq!(
            sequential_schedule(8, 0.01, 30e3).unwrap().duty_frac(),
            q(115, 1000)
        );
        let s = sequential_schedule(4, 0.0, 30e3).unwrap();
        assert_eq!(s.duty_frac(), q(1, 4));
        assert!(sequential_schedule(4, 0.25, 30e3).is_err());
        assert!(sequential_schedule(8, 0.2, 30e3).is_err());
    }

    #[test]
    fn states_at_examples() {
        let s = interleaved_schedule(4, 0.235, 30e3).unwrap();
        let t = s.period();
        assert_eq!(s.states_at(0.0), vec![true, false, false, false]);
        assert_eq!(s.states_at(0.24 * t), vec![false; 4]);
        assert_eq!(s.states_at(t), s.states_at(0.0));
        // Half-open: the turn-off instant is already off.
        assert_eq!(s.states_at_frac(q(235, 1000)), vec![false; 4]);
        assert_eq!(s.states_at_frac(q(1, 4)), vec![false, true, false, false]);
    }

    #[test]
    fn and_examples() {
        let a = PwmSignal::window(1.0, q(0, 1), q(1, 2));
        let b = PwmSignal::window(1.0, q(1, 4), q(1, 2));
        let c = and_compose(&a, &b).unwrap();
        assert_eq!(c.intervals(), &[(q(1, 4), q(1, 2))]);
        assert_eq!(and_compose(&a, &a).unwrap(), a);
        let d = PwmSignal::window(1.0, q(1, 2), q(1, 4));
        assert!(and_compose(&a, &d).unwrap().is_empty());
        let e = PwmSignal::window(2.0, q(0, 1), q(1, 2));
        assert!(and_compose(&a, &e).is_err());
    }

    #[test]
    fn wrapped_window() {
        let w = PwmSignal::window(1.0, q(7, 8), q(1, 4));
        assert_eq!(w.on_fraction(), q(1, 4));
        assert!(w.is_on(q(0, 1)));
        assert!(w.is_on(q(15, 16)));
        assert!(!w.is_on(q(1, 8)));
    }

    #[test]
    fn firing_order_permutes_offsets() {
        let s = interleaved_schedule(4, 0.3, 30e3)
            .unwrap()
            .with_firing_order(&[1, 3, 2, 4])
            .unwrap();
        assert_eq!(s.offset(3), q(1, 4));
        assert_eq!(s.offset(2), q(1, 2));
        assert!(interleaved_schedule(4, 0.3, 30e3)
            .unwrap()
            .with_firing_order(&[1, 1, 2, 4])
            .is_err());
    }
}
