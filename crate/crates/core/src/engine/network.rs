//! Resistive network solve for a fixed conduction configuration.
//!
//! Inductors enter as current sources carrying their state current and
//! capacitors as voltage sources (behind their series resistance) at their
//! state voltage. Every other branch is a Thévenin branch
//! `v(from) − v(to) − r·i = e` with its own current unknown, so zero-ohm
//! sources need no special casing. The unknown vector is
//! `[node voltages (ground excluded) | Thévenin branch currents]`.

use nalgebra::{DMatrix, DVector, LU};

use crate::error::{Error, Result};
use crate::spec::LossParams;
use crate::topology::{BranchKind, Netlist, Role, GROUND};

/// Joint on/off assignment of every switch and diode, in role order.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Conduction {
    pub switches: Vec<bool>,
    pub diodes: Vec<bool>,
}

impl Conduction {
    pub fn new(switches: Vec<bool>, diodes: Vec<bool>) -> Self {
        Conduction { switches, diodes }
    }

    /// Packed bitmask, switches in the low bits.
    pub fn key(&self) -> u128 {
        let mut key = 0u128;
        for (i, &on) in self.switches.iter().chain(self.diodes.iter()).enumerate() {
            if on {
                key |= 1 << i;
            }
        }
        key
    }

    pub fn describe(&self) -> String {
        let on = |v: &[bool], p: char| {
            v.iter()
                .enumerate()
                .filter(|(_, &b)| b)
                .map(|(i, _)| format!("{p}{}", i + 1))
                .collect::<Vec<_>>()
                .join(",")
        };
        format!(
            "switches on [{}], diodes on [{}]",
            on(&self.switches, 'S'),
            on(&self.diodes, 'D')
        )
    }
}

/// Where each dynamic state lives: inductor currents first, then capacitor
/// voltages, each group in role order.
#[derive(Debug, Clone, PartialEq)]
pub struct StateLayout {
    pub inductors: Vec<usize>,
    pub capacitors: Vec<usize>,
    roles: Vec<Role>,
}

impl StateLayout {
    pub fn of(net: &Netlist) -> Self {
        let inductors = net.indices_of(BranchKind::Inductor);
        let capacitors = net.indices_of(BranchKind::Capacitor);
        let roles = inductors
            .iter()
            .chain(capacitors.iter())
            .map(|&b| net.branch(b).role)
            .collect();
        StateLayout {
            inductors,
            capacitors,
            roles,
        }
    }

    pub fn dimension(&self) -> usize {
        self.inductors.len() + self.capacitors.len()
    }

    pub fn index_of(&self, role: Role) -> Option<usize> {
        self.roles.iter().position(|&r| r == role)
    }

    pub fn role(&self, index: usize) -> Role {
        self.roles[index]
    }

    pub fn roles(&self) -> &[Role] {
        &self.roles
    }

    /// Branch index backing state `index`.
    pub fn branch(&self, index: usize) -> usize {
        if index < self.inductors.len() {
            self.inductors[index]
        } else {
            self.capacitors[index - self.inductors.len()]
        }
    }
}

/// Node voltages and branch quantities of one static solve.
#[derive(Debug, Clone, PartialEq)]
pub struct NetworkSolution {
    /// Indexed by node id; ground is 0 V.
    pub node_voltages: Vec<f64>,
    /// Indexed by branch; inductor entries equal the state current.
    pub branch_currents: Vec<f64>,
}

impl NetworkSolution {
    pub fn node(&self, node: usize) -> f64 {
        self.node_voltages[node]
    }
}

/// Index bookkeeping for one netlist plus the device model used to stamp it.
#[derive(Debug, Clone)]
pub struct Network {
    netlist: Netlist,
    model: LossParams,
    layout: StateLayout,
    switches: Vec<usize>,
    diodes: Vec<usize>,
    /// Current unknown of each non-inductor branch.
    unknown: Vec<Option<usize>>,
    node_unknowns: usize,
    size: usize,
}

/// Everything linear about one configuration: the solution map
/// `z = zp·x + zs`, the state derivative `ẋ = a·x + b`, and the diode
/// observation `obs = diode_obs·x + diode_obs0` (current of conducting
/// diodes, forward bias beyond the drop for blocking ones).
#[derive(Debug, Clone)]
pub struct ConfigSystem {
    pub conduction: Conduction,
    pub zp: DMatrix<f64>,
    pub zs: DVector<f64>,
    pub a: DMatrix<f64>,
    pub b: DVector<f64>,
    pub diode_obs: DMatrix<f64>,
    pub diode_obs0: DVector<f64>,
}

impl Network {
    pub fn new(netlist: &Netlist) -> Self {
        Self::with_model(netlist, netlist.losses)
    }

    /// Stamp with a device model other than the netlist's own.
    pub fn with_model(netlist: &Netlist, model: LossParams) -> Self {
        let node_unknowns = netlist.node_count() - 1;
        let mut unknown = Vec::with_capacity(netlist.branches().len());
        let mut next = node_unknowns;
        for b in netlist.branches() {
            if b.kind == BranchKind::Inductor {
                unknown.push(None);
            } else {
                unknown.push(Some(next));
                next += 1;
            }
        }
        Network {
            layout: StateLayout::of(netlist),
            switches: netlist.indices_of(BranchKind::Switch),
            diodes: netlist.indices_of(BranchKind::Diode),
            netlist: netlist.clone(),
            model,
            unknown,
            node_unknowns,
            size: next,
        }
    }

    pub fn netlist(&self) -> &Netlist {
        &self.netlist
    }

    pub fn model(&self) -> &LossParams {
        &self.model
    }

    pub fn layout(&self) -> &StateLayout {
        &self.layout
    }

    pub fn switch_branches(&self) -> &[usize] {
        &self.switches
    }

    pub fn diode_branches(&self) -> &[usize] {
        &self.diodes
    }

    pub fn state_dimension(&self) -> usize {
        self.layout.dimension()
    }

    /// Change the value of a voltage source (or any branch) in place.
    pub fn set_value(&mut self, role: Role, value: f64) -> Result<()> {
        self.netlist.set_value(role, value)
    }

    pub fn all_off(&self) -> Conduction {
        Conduction::new(
            vec![false; self.switches.len()],
            vec![false; self.diodes.len()],
        )
    }

    fn node_index(node: usize) -> Option<usize> {
        (node != GROUND).then(|| node - 1)
    }

    /// Series resistance and offset of a Thévenin branch.
    fn thevenin(&self, branch: usize, c: &Conduction) -> (f64, f64) {
        let b = self.netlist.branch(branch);
        match b.kind {
            BranchKind::VoltageSource => (0.0, b.value),
            BranchKind::Capacitor => (self.model.r_cap, 0.0),
            BranchKind::Resistor => (b.value, 0.0),
            BranchKind::Switch => {
                let k = self.switches.iter().position(|&s| s == branch).unwrap();
                if c.switches[k] {
                    (self.model.r_switch_on, 0.0)
                } else {
                    (self.model.r_off, 0.0)
                }
            }
            BranchKind::Diode => {
                let k = self.diodes.iter().position(|&d| d == branch).unwrap();
                if c.diodes[k] {
                    (self.model.r_diode_on, self.model.v_diode)
                } else {
                    (self.model.r_off, 0.0)
                }
            }
            BranchKind::Inductor => unreachable!("inductors are current sources"),
        }
    }

    fn matrix(&self, c: &Conduction) -> DMatrix<f64> {
        let mut k = DMatrix::zeros(self.size, self.size);
        for (i, b) in self.netlist.branches().iter().enumerate() {
            let Some(u) = self.unknown[i] else { continue };
            let (r, _) = self.thevenin(i, c);
            if let Some(a) = Self::node_index(b.from) {
                k[(a, u)] += 1.0;
                k[(u, a)] += 1.0;
            }
            if let Some(t) = Self::node_index(b.to) {
                k[(t, u)] -= 1.0;
                k[(u, t)] -= 1.0;
            }
            k[(u, u)] = -r;
        }
        k
    }

    /// Right-hand side split into a state part and a constant part.
    fn rhs_parts(&self, c: &Conduction) -> (DMatrix<f64>, DVector<f64>) {
        let n = self.layout.dimension();
        let mut p = DMatrix::zeros(self.size, n);
        let mut s = DVector::zeros(self.size);
        for (state, &branch) in self.layout.inductors.iter().enumerate() {
            let b = self.netlist.branch(branch);
            if let Some(a) = Self::node_index(b.from) {
                p[(a, state)] -= 1.0;
            }
            if let Some(t) = Self::node_index(b.to) {
                p[(t, state)] += 1.0;
            }
        }
        let offset = self.layout.inductors.len();
        for (j, &branch) in self.layout.capacitors.iter().enumerate() {
            let u = self.unknown[branch].unwrap();
            p[(u, offset + j)] = 1.0;
        }
        for (i, u) in self.unknown.iter().enumerate() {
            if let Some(u) = *u {
                let (_, e) = self.thevenin(i, c);
                s[u] += e;
            }
        }
        (p, s)
    }

    fn factor(&self, c: &Conduction) -> Result<LU<f64, nalgebra::Dyn, nalgebra::Dyn>> {
        let lu = self.matrix(c).lu();
        if !lu.is_invertible() {
            return Err(Error::Singular(c.describe()));
        }
        Ok(lu)
    }

    /// Precompute every linear map of configuration `c`.
    pub fn config_system(&self, c: &Conduction) -> Result<ConfigSystem> {
        let lu = self.factor(c)?;
        let (p, s) = self.rhs_parts(c);
        let zp = lu.solve(&p).ok_or_else(|| Error::Singular(c.describe()))?;
        let zs = lu.solve(&s).ok_or_else(|| Error::Singular(c.describe()))?;
        if zp.iter().chain(zs.iter()).any(|v| !v.is_finite()) {
            return Err(Error::Singular(c.describe()));
        }

        let n = self.layout.dimension();
        // Derivative extraction: ẋ = dz·z + dx·x.
        let mut dz = DMatrix::zeros(n, self.size);
        let mut dx = DMatrix::zeros(n, n);
        for (state, &branch) in self.layout.inductors.iter().enumerate() {
            let b = self.netlist.branch(branch);
            let inv_l = 1.0 / b.value;
            if let Some(a) = Self::node_index(b.from) {
                dz[(state, a)] += inv_l;
            }
            if let Some(t) = Self::node_index(b.to) {
                dz[(state, t)] -= inv_l;
            }
            dx[(state, state)] -= self.model.r_inductor * inv_l;
        }
        let offset = self.layout.inductors.len();
        for (j, &branch) in self.layout.capacitors.iter().enumerate() {
            let b = self.netlist.branch(branch);
            dz[(offset + j, self.unknown[branch].unwrap())] = 1.0 / b.value;
        }
        let a = &dz * &zp + dx;
        let b = &dz * &zs;

        let mut obs = DMatrix::zeros(self.diodes.len(), self.size);
        let mut obs0 = DVector::zeros(self.diodes.len());
        for (k, &branch) in self.diodes.iter().enumerate() {
            let d = self.netlist.branch(branch);
            if c.diodes[k] {
                obs[(k, self.unknown[branch].unwrap())] = 1.0;
            } else {
                if let Some(a) = Self::node_index(d.from) {
                    obs[(k, a)] += 1.0;
                }
                if let Some(t) = Self::node_index(d.to) {
                    obs[(k, t)] -= 1.0;
                }
                obs0[k] = -self.model.v_diode;
            }
        }
        let diode_obs = &obs * &zp;
        let diode_obs0 = &obs * &zs + obs0;

        Ok(ConfigSystem {
            conduction: c.clone(),
            zp,
            zs,
            a,
            b,
            diode_obs,
            diode_obs0,
        })
    }

    /// Expand the unknown vector of `sys` at state `x` into node voltages
    /// and branch currents.
    pub fn expand(&self, sys: &ConfigSystem, x: &DVector<f64>) -> NetworkSolution {
        let z = &sys.zp * x + &sys.zs;
        let mut node_voltages = vec![0.0; self.node_unknowns + 1];
        node_voltages[1..].copy_from_slice(&z.as_slice()[..self.node_unknowns]);
        let mut branch_currents = vec![0.0; self.netlist.branches().len()];
        for (i, u) in self.unknown.iter().enumerate() {
            if let Some(u) = *u {
                branch_currents[i] = z[u];
            }
        }
        for (state, &branch) in self.layout.inductors.iter().enumerate() {
            branch_currents[branch] = x[state];
        }
        NetworkSolution {
            node_voltages,
            branch_currents,
        }
    }

    /// One-off static solve at state `x`.
    pub fn solve(&self, c: &Conduction, x: &DVector<f64>) -> Result<NetworkSolution> {
        let sys = self.config_system(c)?;
        Ok(self.expand(&sys, x))
    }

    /// Voltage across the ideal inductance of state `state` (series
    /// resistance drop removed).
    pub fn inductor_voltage(&self, sol: &NetworkSolution, state: usize, x: &DVector<f64>) -> f64 {
        let b = self.netlist.branch(self.layout.inductors[state]);
        sol.node(b.from) - sol.node(b.to) - self.model.r_inductor * x[state]
    }

    pub fn branch_voltage(&self, sol: &NetworkSolution, branch: usize) -> f64 {
        let b = self.netlist.branch(branch);
        sol.node(b.from) - sol.node(b.to)
    }

    /// Power dissipated in every resistive element except the load.
    pub fn dissipation(&self, sol: &NetworkSolution) -> f64 {
        let mut p = 0.0;
        for (i, b) in self.netlist.branches().iter().enumerate() {
            let current = sol.branch_currents[i];
            p += match b.kind {
                BranchKind::Switch | BranchKind::Diode => self.branch_voltage(sol, i) * current,
                BranchKind::Resistor if b.role != Role::RLoad => {
                    self.branch_voltage(sol, i) * current
                }
                BranchKind::Inductor => self.model.r_inductor * current * current,
                BranchKind::Capacitor => self.model.r_cap * current * current,
                _ => 0.0,
            };
        }
        p
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::topology::{BranchKind, Netlist, Role};

    #[test]
    fn resistor_divider() {
        let mut net = Netlist::new(LossParams::ideal());
        let top = net.add_node("top");
        let mid = net.add_node("mid");
        net.add_branch(Role::Vin, BranchKind::VoltageSource, 12.0, top, GROUND);
        net.add_branch(Role::Aux(1), BranchKind::Resistor, 1000.0, top, mid);
        net.add_branch(Role::Aux(2), BranchKind::Resistor, 3000.0, mid, GROUND);
        let network = Network::new(&net);
        let sol = network
            .solve(&network.all_off(), &DVector::zeros(0))
            .unwrap();
        assert!((sol.node(mid) - 9.0).abs() < 1e-12);
        assert!((sol.branch_currents[1] - 3e-3).abs() < 1e-15);
        // Source current flows − to + inside the source when it delivers power.
        assert!((sol.branch_currents[0] + 3e-3).abs() < 1e-15);
    }

    #[test]
    fn floating_node_is_singular() {
        let mut net = Netlist::new(LossParams::ideal());
        let a = net.add_node("a");
        let b = net.add_node("b");
        net.add_branch(Role::Aux(1), BranchKind::Inductor, 1e-3, a, b);
        net.add_branch(Role::Aux(2), BranchKind::Resistor, 1.0, a, GROUND);
        let network = Network::new(&net);
        assert!(matches!(
            network.config_system(&network.all_off()),
            Err(Error::Singular(_))
        ));
    }

    #[test]
    fn lr_state_space() {
        let mut net = Netlist::new(LossParams::ideal());
        let a = net.add_node("a");
        net.add_branch(Role::Aux(1), BranchKind::Inductor, 2e-3, a, GROUND);
        net.add_branch(Role::Aux(2), BranchKind::Resistor, 4.0, GROUND, a);
        let network = Network::new(&net);
        let sys = network.config_system(&network.all_off()).unwrap();
        assert!((sys.a[(0, 0)] + 4.0 / 2e-3).abs() < 1e-9);
        assert!(sys.b[0].abs() < 1e-15);
    }
}
