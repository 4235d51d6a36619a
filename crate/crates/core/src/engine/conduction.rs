//! Ideal-diode conduction resolution.

use std::collections::BTreeMap;

use nalgebra::DVector;

use crate::error::{Error, Result};
use crate::topology::Netlist;

use super::network::{Conduction, ConfigSystem, Network};

/// Complementarity tolerances: a conducting diode may carry down to
/// `−current`, a blocking diode may see up to `+voltage` of forward bias.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tolerances {
    pub current: f64,
    pub voltage: f64,
}

impl Tolerances {
    /// `1e−6` of the rated current and of the input voltage.
    pub fn scaled(rated_current: f64, vin: f64) -> Self {
        Tolerances {
            current: 1e-6 * rated_current.abs().max(1e-3),
            voltage: 1e-6 * vin.abs().max(1e-3),
        }
    }
}

/// Index of the first diode violating complementarity, if any.
pub fn first_violation(sys: &ConfigSystem, x: &DVector<f64>, tol: &Tolerances) -> Option<usize> {
    let obs = &sys.diode_obs * x + &sys.diode_obs0;
    sys.conduction
        .diodes
        .iter()
        .enumerate()
        .find_map(|(k, &on)| {
            let violated = if on {
                obs[k] < -tol.current
            } else {
                obs[k] > tol.voltage
            };
            violated.then_some(k)
        })
}

/// Fixed-point iteration over diode states, one flip per solve in ascending
/// diode order, bounded at `4N` flips.
pub(crate) fn resolve_with<F>(
    start: Conduction,
    x: &DVector<f64>,
    tol: &Tolerances,
    time: f64,
    mut system: F,
) -> Result<Conduction>
where
    F: FnMut(&Conduction) -> Result<std::rc::Rc<ConfigSystem>>,
{
    let limit = 4 * start.diodes.len().max(1);
    let mut current = start;
    let mut flips: BTreeMap<usize, usize> = BTreeMap::new();
    for _ in 0..=limit {
        let sys = system(&current)?;
        match first_violation(&sys, x, tol) {
            None => return Ok(current),
            Some(k) => {
                current.diodes[k] = !current.diodes[k];
                *flips.entry(k).or_default() += 1;
            }
        }
    }
    let oscillating = flips
        .into_iter()
        .filter(|&(_, n)| n > 1)
        .map(|(k, _)| format!("D{}", k + 1))
        .collect();
    Err(Error::Conduction { time, oscillating })
}

/// Resolve diode states for `netlist` at state `state` with the given
/// switch states, starting from every diode conducting.
pub fn resolve_conduction(
    netlist: &Netlist,
    state: &DVector<f64>,
    switch_states: &[bool],
    tol: &Tolerances,
) -> Result<Conduction> {
    let network = Network::new(netlist);
    if switch_states.len() != network.switch_branches().len() {
        return Err(Error::Structure(format!(
            "expected {} switch states, got {}",
            network.switch_branches().len(),
            switch_states.len()
        )));
    }
    let start = Conduction::new(
        switch_states.to_vec(),
        vec![true; network.diode_branches().len()],
    );
    resolve_with(start, state, tol, 0.0, |c| {
        Ok(std::rc::Rc::new(network.config_system(c)?))
    })
}
