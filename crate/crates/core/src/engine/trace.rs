use std::fmt::Write as _;
use std::io::Write;

use crate::error::{Error, Result};
use crate::topology::Role;

/// Dynamic state of a netlist: inductor currents then capacitor voltages,
/// each in role order. For a converter this is
/// `[i_L1 … i_LN, i_Lo, v_C1, v_C2, v_CB1 … v_CB(N−2), v_Co]`.
#[derive(Debug, Clone, PartialEq)]
pub struct StateVector {
    roles: Vec<Role>,
    values: Vec<f64>,
}

impl StateVector {
    pub fn new(roles: Vec<Role>, values: Vec<f64>) -> Result<Self> {
        if roles.len() != values.len() {
            return Err(Error::Trace(format!(
                "state has {} roles but {} values",
                roles.len(),
                values.len()
            )));
        }
        Ok(StateVector { roles, values })
    }

    pub fn zeros(roles: Vec<Role>) -> Self {
        let values = vec![0.0; roles.len()];
        StateVector { roles, values }
    }

    pub fn roles(&self) -> &[Role] {
        &self.roles
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn get(&self, role: Role) -> Option<f64> {
        self.roles
            .iter()
            .position(|&r| r == role)
            .map(|i| self.values[i])
    }

    pub fn set(&mut self, role: Role, value: f64) -> bool {
        match self.roles.iter().position(|&r| r == role) {
            Some(i) => {
                self.values[i] = value;
                true
            }
            None => false,
        }
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    /// `‖a − b‖∞ / max(‖a‖∞, ‖b‖∞)`.
    pub fn relative_change(&self, other: &StateVector) -> f64 {
        let diff = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        let scale = self
            .values
            .iter()
            .chain(&other.values)
            .map(|v| v.abs())
            .fold(0.0, f64::max);
        if scale == 0.0 {
            diff
        } else {
            diff / scale
        }
    }
}

/// One accepted point of a transient run. At discontinuities the run emits
/// two samples with the same time: the left limit under the old
/// configuration and the right limit under the new one.
#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub t: f64,
    pub x: Vec<f64>,
    /// Voltage across each inductance (series resistance excluded).
    pub v_ind: Vec<f64>,
    /// Current into each capacitor.
    pub i_cap: Vec<f64>,
    pub i_in: f64,
    pub v_in: f64,
    pub v_out: f64,
    pub v_f: f64,
    /// Blocking voltage of each switch.
    pub v_sw: Vec<f64>,
    /// Reverse voltage of each diode (cathode minus anode).
    pub v_dio: Vec<f64>,
    /// Current through each diode, anode to cathode.
    pub i_dio: Vec<f64>,
    pub diodes_on: Vec<bool>,
    pub p_in: f64,
    pub p_out: f64,
    /// Dissipation in every resistive element other than the load.
    pub p_diss: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trace {
    pub period: f64,
    pub state_roles: Vec<Role>,
    pub switches: usize,
    pub diodes: usize,
    pub samples: Vec<Sample>,
}

fn state_column(role: Role) -> String {
    match role {
        Role::L(k) => format!("il_{k}"),
        Role::Lo => "il_o".into(),
        Role::C1 => "vc_1".into(),
        Role::C2 => "vc_2".into(),
        Role::Cb(j) => format!("vcb_{j}"),
        Role::Co => "vc_o".into(),
        other => format!("x_{other}").to_lowercase(),
    }
}

impl Trace {
    pub fn new(period: f64, state_roles: Vec<Role>, switches: usize, diodes: usize) -> Self {
        Trace {
            period,
            state_roles,
            switches,
            diodes,
            samples: Vec::new(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn start_time(&self) -> f64 {
        self.samples.first().map_or(0.0, |s| s.t)
    }

    pub fn end_time(&self) -> f64 {
        self.samples.last().map_or(0.0, |s| s.t)
    }

    pub fn duration(&self) -> f64 {
        self.end_time() - self.start_time()
    }

    pub fn state_index(&self, role: Role) -> Option<usize> {
        self.state_roles.iter().position(|&r| r == role)
    }

    /// Samples of the last full period, including both endpoints.
    pub fn final_cycle(&self) -> Result<&[Sample]> {
        let end = self.end_time();
        let start = end - self.period;
        if self.duration() < self.period * (1.0 - 1e-9) {
            return Err(Error::Trace(format!(
                "trace spans {:e} s, shorter than one period ({:e} s)",
                self.duration(),
                self.period
            )));
        }
        let eps = self.period * 1e-9;
        let first = self
            .samples
            .iter()
            .position(|s| s.t >= start - eps)
            .unwrap_or(0);
        Ok(&self.samples[first..])
    }

    /// Column names, CSV order.
    pub fn columns(&self) -> Vec<String> {
        let mut cols = vec!["t".to_string()];
        cols.extend(self.state_roles.iter().map(|&r| state_column(r)));
        cols.extend(["i_in", "v_out", "v_f"].map(String::from));
        cols.extend((1..=self.switches).map(|k| format!("vs_{k}")));
        cols.extend((1..=self.diodes).map(|k| format!("vd_{k}")));
        cols.extend(["p_in", "p_out"].map(String::from));
        cols
    }

    fn row(&self, s: &Sample) -> Vec<f64> {
        let mut row = Vec::with_capacity(self.columns().len());
        row.push(s.t);
        row.extend_from_slice(&s.x);
        row.extend([s.i_in, s.v_out, s.v_f]);
        row.extend_from_slice(&s.v_sw);
        row.extend_from_slice(&s.v_dio);
        row.extend([s.p_in, s.p_out]);
        row
    }

    /// Values of the named CSV column over all samples.
    pub fn signal(&self, name: &str) -> Option<Vec<f64>> {
        let index = self.columns().iter().position(|c| c == name)?;
        Some(self.samples.iter().map(|s| self.row(s)[index]).collect())
    }

    pub fn times(&self) -> Vec<f64> {
        self.samples.iter().map(|s| s.t).collect()
    }

    /// CSV with a header row, one row per sample, `\n` line endings.
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "{}", self.columns().join(","))?;
        let mut line = String::new();
        for s in &self.samples {
            line.clear();
            for (i, v) in self.row(s).iter().enumerate() {
                if i > 0 {
                    line.push(',');
                }
                write!(line, "{v}").expect("writing to a String cannot fail");
            }
            line.push('\n');
            out.write_all(line.as_bytes())?;
        }
        Ok(())
    }

    pub fn to_csv_string(&self) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf).expect("in-memory write");
        String::from_utf8(buf).expect("csv is ascii")
    }
}

/// Time average of `f` over `samples` by the trapezoid rule.
pub fn time_average(samples: &[Sample], f: impl Fn(&Sample) -> f64) -> f64 {
    if samples.len() < 2 {
        return samples.first().map_or(f64::NAN, &f);
    }
    let mut integral = 0.0;
    let mut prev = &samples[0];
    let mut prev_v = f(prev);
    for s in &samples[1..] {
        let v = f(s);
        integral += 0.5 * (prev_v + v) * (s.t - prev.t);
        prev = s;
        prev_v = v;
    }
    let span = samples[samples.len() - 1].t - samples[0].t;
    integral / span
}
