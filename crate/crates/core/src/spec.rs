//! Electrical description of one converter instance.

use crate::error::{Error, Result};

/// Default output capacitance used when a scenario does not name one.
pub const DEFAULT_C_OUT: f64 = 470e-6;

/// Parasitic and device parameters.
///
/// Off devices are never removed from the network; they are stamped as
/// `r_off` so every conduction configuration stays solvable.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossParams {
    pub r_switch_on: f64,
    pub v_diode: f64,
    pub r_diode_on: f64,
    pub r_inductor: f64,
    pub r_cap: f64,
    pub r_off: f64,
}

impl LossParams {
    /// Lossless devices apart from the 1 mΩ / 10 MΩ conditioning floor.
    pub const fn ideal() -> Self {
        LossParams {
            r_switch_on: 1e-3,
            v_diode: 0.0,
            r_diode_on: 1e-3,
            r_inductor: 0.0,
            r_cap: 0.0,
            r_off: 1e7,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let named = [
            ("r_switch_on", self.r_switch_on),
            ("v_diode", self.v_diode),
            ("r_diode_on", self.r_diode_on),
            ("r_inductor", self.r_inductor),
            ("r_cap", self.r_cap),
        ];
        for (name, value) in named {
            if !(value.is_finite() && value >= 0.0) {
                return Err(Error::InvalidSpec(format!(
                    "{name} must be finite and >= 0, got {value}"
                )));
            }
        }
        if !(self.r_off.is_finite() && self.r_off > 0.0) {
            return Err(Error::InvalidSpec(format!(
                "r_off must be > 0, got {}",
                self.r_off
            )));
        }
        Ok(())
    }
}

impl Default for LossParams {
    fn default() -> Self {
        Self::ideal()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConverterSpec {
    /// Phase count N (even, at least 4).
    pub phases: usize,
    pub vin: f64,
    pub fsw: f64,
    pub duty: f64,
    pub l_phase: f64,
    pub l_out: f64,
    pub c_in: f64,
    pub c_block: f64,
    pub c_out: f64,
    pub load_ohms: f64,
    pub losses: LossParams,
    /// Permit `duty >= 2/N` (used to reproduce the high-duty anomaly).
    pub allow_invalid_duty: bool,
}

impl ConverterSpec {
    /// The four-phase bench point: 400 V, 30 kHz, 330 µH phases, 10 µH output
    /// inductor, 100 µF input and 10 µF blocking capacitors, 24 V / 500 W load.
    pub fn table1(duty: f64) -> Self {
        ConverterSpec {
            phases: 4,
            vin: 400.0,
            fsw: 30e3,
            duty,
            l_phase: 330e-6,
            l_out: 10e-6,
            c_in: 100e-6,
            c_block: 10e-6,
            c_out: DEFAULT_C_OUT,
            load_ohms: load_for(24.0, 500.0),
            losses: LossParams::ideal(),
            allow_invalid_duty: false,
        }
    }

    /// The eight-phase prototype point: 400 V in, 12 V / 144 W out, D = 0.24.
    pub fn eight_phase_prototype() -> Self {
        ConverterSpec {
            phases: 8,
            duty: 0.24,
            load_ohms: load_for(12.0, 144.0),
            ..Self::table1(0.24)
        }
    }

    /// Upper duty bound `2/N` for this phase count.
    pub fn duty_limit(&self) -> f64 {
        duty_limit(self.phases)
    }

    pub fn legs(&self) -> usize {
        self.phases / 2
    }

    pub fn period(&self) -> f64 {
        1.0 / self.fsw
    }

    /// Output voltage predicted by the ideal gain `D/(N−D)`.
    pub fn ideal_vout(&self) -> f64 {
        self.vin * self.duty / (self.phases as f64 - self.duty)
    }

    /// Output current at the ideal operating point.
    pub fn rated_current(&self) -> f64 {
        self.ideal_vout() / self.load_ohms
    }

    pub fn validate(&self) -> Result<()> {
        validate_phases(self.phases)?;
        let positive = [
            ("vin", self.vin),
            ("fsw", self.fsw),
            ("l_phase", self.l_phase),
            ("l_out", self.l_out),
            ("c_in", self.c_in),
            ("c_block", self.c_block),
            ("c_out", self.c_out),
            ("load_ohms", self.load_ohms),
        ];
        for (name, value) in positive {
            if !(value.is_finite() && value > 0.0) {
                return Err(Error::InvalidSpec(format!(
                    "{name} must be > 0, got {value}"
                )));
            }
        }
        self.losses.validate()?;
        if !(self.duty.is_finite() && self.duty > 0.0 && self.duty < 1.0) {
            return Err(Error::InvalidSpec(format!(
                "duty must lie in (0, 1), got {}",
                self.duty
            )));
        }
        if self.duty >= self.duty_limit() && !self.allow_invalid_duty {
            return Err(Error::InvalidSpec(format!(
                "duty {} is outside the valid range (0, 2/N = {}) for N = {}",
                self.duty,
                self.duty_limit(),
                self.phases
            )));
        }
        Ok(())
    }
}

pub fn duty_limit(phases: usize) -> f64 {
    2.0 / phases as f64
}

pub fn validate_phases(phases: usize) -> Result<()> {
    if phases < 4 || phases % 2 != 0 {
        return Err(Error::InvalidSpec(format!(
            "phases must be even >= 4, got {phases}"
        )));
    }
    Ok(())
}

/// Resistive load that draws `power` at `voltage`.
pub fn load_for(voltage: f64, power: f64) -> f64 {
    voltage * voltage / power
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn presets_are_valid() {
        ConverterSpec::table1(0.235).validate().unwrap();
        ConverterSpec::table1(0.215).validate().unwrap();
        ConverterSpec::eight_phase_prototype().validate().unwrap();
    }

    #[test]
    fn load_representation() {
        assert!((ConverterSpec::table1(0.235).load_ohms - 1.152).abs() < 1e-12);
        assert!((ConverterSpec::eight_phase_prototype().load_ohms - 1.0).abs() < 1e-12);
    }

    #[test]
    fn rejects_bad_phase_counts_and_duty() {
        let mut spec = ConverterSpec::table1(0.235);
        spec.phases = 5;
        assert!(spec.validate().is_err());
        spec.phases = 2;
        assert!(spec.validate().is_err());

        let mut spec = ConverterSpec::eight_phase_prototype();
        spec.duty = 0.30;
        assert!(spec.validate().is_err());
        spec.allow_invalid_duty = true;
        spec.validate().unwrap();
    }

    #[test]
    fn rejects_non_positive_components() {
        let mut spec = ConverterSpec::table1(0.235);
        spec.c_block = 0.0;
        assert!(spec.validate().is_err());
        let mut spec = ConverterSpec::table1(0.235);
        spec.losses.r_off = 0.0;
        assert!(spec.validate().is_err());
    }
}
