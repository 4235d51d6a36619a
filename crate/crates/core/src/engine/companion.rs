//! Discrete-time companion of a fixed-configuration network.
//!
//! For a linear resistive network with L and C states, stamping trapezoidal
//! companion models into the nodal equations is the same as applying the
//! trapezoidal rule to `ẋ = A·x + b`. The step therefore reduces to the
//! small dense system `(I − h/2·A)·x⁺ = (I + h/2·A)·x + h·b`.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::topology::Netlist;

use super::network::{Conduction, ConfigSystem, Network};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Integrator {
    Trapezoidal,
    /// Used for the first steps after a discontinuity to damp stiff modes
    /// that the trapezoidal rule would leave ringing.
    BackwardEuler,
}

/// The linear system of one integration step.
#[derive(Debug, Clone)]
pub struct CompanionSystem {
    pub lhs: DMatrix<f64>,
    pub rhs_state: DMatrix<f64>,
    pub rhs_const: DVector<f64>,
}

impl CompanionSystem {
    pub fn from_config(sys: &ConfigSystem, dt: f64, method: Integrator) -> Result<Self> {
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(Error::Trace(format!("step size must be > 0, got {dt}")));
        }
        let n = sys.a.nrows();
        let eye = DMatrix::<f64>::identity(n, n);
        let (lhs, rhs_state) = match method {
            Integrator::Trapezoidal => (&eye - &sys.a * (0.5 * dt), &eye + &sys.a * (0.5 * dt)),
            Integrator::BackwardEuler => (&eye - &sys.a * dt, eye),
        };
        Ok(CompanionSystem {
            lhs,
            rhs_state,
            rhs_const: &sys.b * dt,
        })
    }

    /// Solve for the state one step ahead.
    pub fn advance(&self, x: &DVector<f64>) -> Result<DVector<f64>> {
        let rhs = &self.rhs_state * x + &self.rhs_const;
        self.lhs
            .clone()
            .lu()
            .solve(&rhs)
            .ok_or_else(|| Error::Singular("companion step matrix".into()))
    }

    /// Pre-inverted affine map `x⁺ = m·x + c`.
    pub fn step_map(&self) -> Result<StepMap> {
        let inv = self
            .lhs
            .clone()
            .try_inverse()
            .ok_or_else(|| Error::Singular("companion step matrix".into()))?;
        Ok(StepMap {
            m: &inv * &self.rhs_state,
            c: &inv * &self.rhs_const,
        })
    }
}

#[derive(Debug, Clone)]
pub struct StepMap {
    pub m: DMatrix<f64>,
    pub c: DVector<f64>,
}

impl StepMap {
    pub fn apply(&self, x: &DVector<f64>) -> DVector<f64> {
        &self.m * x + &self.c
    }
}

/// Assemble the trapezoidal step system of `netlist` under `conduction`.
pub fn assemble_companion(
    netlist: &Netlist,
    conduction: &Conduction,
    dt: f64,
) -> Result<CompanionSystem> {
    let network = Network::new(netlist);
    let sys = network.config_system(conduction)?;
    CompanionSystem::from_config(&sys, dt, Integrator::Trapezoidal)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spec::LossParams;
    use crate::topology::{BranchKind, Role, GROUND};

    fn lr_loop(l: f64, r: f64) -> Netlist {
        let mut net = Netlist::new(LossParams::ideal());
        let a = net.add_node("a");
        net.add_branch(Role::Aux(1), BranchKind::Inductor, l, a, GROUND);
        net.add_branch(Role::Aux(2), BranchKind::Resistor, r, GROUND, a);
        net
    }

    #[test]
    fn lr_decay_is_second_order() {
        let (l, r) = (1e-3, 2.0);
        let tau = l / r;
        let t_end = 2.0 * tau;
        let net = lr_loop(l, r);
        let off = Conduction::new(vec![], vec![]);
        let mut errors = Vec::new();
        for steps in [50usize, 100, 200] {
            let dt = t_end / steps as f64;
            let sys = assemble_companion(&net, &off, dt).unwrap();
            let mut x = DVector::from_element(1, 1.0);
            for _ in 0..steps {
                x = sys.advance(&x).unwrap();
            }
            errors.push((x[0] - (-t_end / tau).exp()).abs());
        }
        // Halving the step cuts the error by ~4.
        for w in errors.windows(2) {
            let ratio = w[0] / w[1];
            assert!((3.8..4.2).contains(&ratio), "ratio {ratio}");
        }
        assert!(errors[2] < 1e-5);
    }

    #[test]
    fn step_map_matches_direct_solve() {
        let net = lr_loop(1e-3, 2.0);
        let off = Conduction::new(vec![], vec![]);
        let sys = assemble_companion(&net, &off, 1e-5).unwrap();
        let x = DVector::from_element(1, 0.7);
        let direct = sys.advance(&x).unwrap();
        let mapped = sys.step_map().unwrap().apply(&x);
        assert!((direct[0] - mapped[0]).abs() < 1e-15);
    }

    #[test]
    fn rejects_non_positive_step() {
        let net = lr_loop(1e-3, 2.0);
        assert!(assemble_companion(&net, &Conduction::new(vec![], vec![]), 0.0).is_err());
    }
}
