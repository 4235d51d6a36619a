use std::collections::BTreeMap;
use std::fmt;

use crate::error::{Error, Result};
use crate::spec::LossParams;

pub type NodeId = usize;

/// Node 0 is the reference node of every netlist.
pub const GROUND: NodeId = 0;

/// Role label of a branch. The derived ordering is the canonical ordering
/// used for state vectors and CSV columns.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Role {
    Vin,
    C1,
    C2,
    /// Blocking capacitor CB_j, 1-based.
    Cb(usize),
    /// Phase inductor L_k, 1-based.
    L(usize),
    Lo,
    Co,
    RLoad,
    S(usize),
    D(usize),
    /// Free label for hand-built netlists.
    Aux(usize),
}

impl fmt::Display for Role {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Role::Vin => write!(f, "VIN"),
            Role::C1 => write!(f, "C1"),
            Role::C2 => write!(f, "C2"),
            Role::Cb(j) => write!(f, "CB{j}"),
            Role::L(k) => write!(f, "L{k}"),
            Role::Lo => write!(f, "LO"),
            Role::Co => write!(f, "CO"),
            Role::RLoad => write!(f, "RLOAD"),
            Role::S(k) => write!(f, "S{k}"),
            Role::D(k) => write!(f, "D{k}"),
            Role::Aux(k) => write!(f, "X{k}"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BranchKind {
    VoltageSource,
    Capacitor,
    Inductor,
    Switch,
    Diode,
    Resistor,
}

/// One two-terminal element.
///
/// Branch voltage is `v(from) − v(to)` and branch current flows from `from`
/// to `to` through the element. A voltage source has its positive terminal
/// at `from`; a diode has its anode at `from`.
#[derive(Debug, Clone, PartialEq)]
pub struct Branch {
    pub role: Role,
    pub kind: BranchKind,
    /// Volts, farads, henries or ohms by kind; unused for switches and diodes.
    pub value: f64,
    pub from: NodeId,
    pub to: NodeId,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Netlist {
    node_names: Vec<String>,
    branches: Vec<Branch>,
    pub losses: LossParams,
    /// Node where the leg-A phase inductors meet the output inductor.
    pub freewheel: Option<NodeId>,
    /// Positive output terminal (across the load).
    pub output: Option<NodeId>,
}

/// Element counts used by the census invariant.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Census {
    pub switches: usize,
    pub diodes: usize,
    pub inductors: usize,
    pub capacitors: usize,
}

impl Netlist {
    pub fn new(losses: LossParams) -> Self {
        Netlist {
            node_names: vec!["gnd".to_string()],
            branches: Vec::new(),
            losses,
            freewheel: None,
            output: None,
        }
    }

    pub fn add_node(&mut self, name: impl Into<String>) -> NodeId {
        self.node_names.push(name.into());
        self.node_names.len() - 1
    }

    pub fn add_branch(
        &mut self,
        role: Role,
        kind: BranchKind,
        value: f64,
        from: NodeId,
        to: NodeId,
    ) -> usize {
        self.branches.push(Branch {
            role,
            kind,
            value,
            from,
            to,
        });
        self.branches.len() - 1
    }

    pub fn node_count(&self) -> usize {
        self.node_names.len()
    }

    pub fn node_name(&self, node: NodeId) -> &str {
        &self.node_names[node]
    }

    pub fn node_by_name(&self, name: &str) -> Option<NodeId> {
        self.node_names.iter().position(|n| n == name)
    }

    pub fn branches(&self) -> &[Branch] {
        &self.branches
    }

    pub fn branch(&self, index: usize) -> &Branch {
        &self.branches[index]
    }

    pub fn branch_index(&self, role: Role) -> Option<usize> {
        self.branches.iter().position(|b| b.role == role)
    }

    pub fn by_role(&self, role: Role) -> Option<&Branch> {
        self.branches.iter().find(|b| b.role == role)
    }

    /// Overwrite the value of the branch labelled `role`.
    pub fn set_value(&mut self, role: Role, value: f64) -> Result<()> {
        let index = self
            .branch_index(role)
            .ok_or_else(|| Error::Structure(format!("no branch labelled {role}")))?;
        self.branches[index].value = value;
        Ok(())
    }

    /// Branch indices of the given kind, sorted by role.
    pub fn indices_of(&self, kind: BranchKind) -> Vec<usize> {
        let mut out: Vec<usize> = (0..self.branches.len())
            .filter(|&i| self.branches[i].kind == kind)
            .collect();
        out.sort_by_key(|&i| self.branches[i].role);
        out
    }

    pub fn census(&self) -> Census {
        let count = |kind| self.branches.iter().filter(|b| b.kind == kind).count();
        Census {
            switches: count(BranchKind::Switch),
            diodes: count(BranchKind::Diode),
            inductors: count(BranchKind::Inductor),
            capacitors: count(BranchKind::Capacitor),
        }
    }

    /// Every node reachable from ground through branches.
    pub fn is_connected(&self) -> bool {
        let n = self.node_names.len();
        let mut adjacency = vec![Vec::new(); n];
        for b in &self.branches {
            adjacency[b.from].push(b.to);
            adjacency[b.to].push(b.from);
        }
        let mut seen = vec![false; n];
        let mut stack = vec![GROUND];
        seen[GROUND] = true;
        while let Some(node) = stack.pop() {
            for &next in &adjacency[node] {
                if !seen[next] {
                    seen[next] = true;
                    stack.push(next);
                }
            }
        }
        seen.into_iter().all(|s| s)
    }

    /// Structural checks for a converter netlist with `phases` phases:
    /// connectivity, node indices in range and the exact role set.
    pub fn validate_converter(&self, phases: usize) -> Result<()> {
        for b in &self.branches {
            if b.from >= self.node_count() || b.to >= self.node_count() {
                return Err(Error::Structure(format!(
                    "branch {} references a missing node",
                    b.role
                )));
            }
            if b.from == b.to {
                return Err(Error::Structure(format!(
                    "branch {} is a self loop",
                    b.role
                )));
            }
        }
        if !self.is_connected() {
            return Err(Error::Structure("netlist graph is not connected".into()));
        }
        let mut seen: BTreeMap<Role, usize> = BTreeMap::new();
        for b in &self.branches {
            *seen.entry(b.role).or_default() += 1;
        }
        let expected = converter_roles(phases);
        for role in &expected {
            match seen.get(role) {
                Some(1) => {}
                Some(c) => return Err(Error::Structure(format!("role {role} appears {c} times"))),
                None => return Err(Error::Structure(format!("role {role} is missing"))),
            }
        }
        if let Some(extra) = seen.keys().find(|r| !expected.contains(r)) {
            return Err(Error::Structure(format!(
                "unexpected role {extra} for N = {phases}"
            )));
        }
        if self.freewheel.is_none() || self.output.is_none() {
            return Err(Error::Structure(
                "freewheel and output nodes must be marked".into(),
            ));
        }
        Ok(())
    }
}

/// The complete role set of an N-phase converter.
pub fn converter_roles(phases: usize) -> Vec<Role> {
    let mut roles = vec![Role::Vin, Role::C1, Role::C2];
    roles.extend((1..=phases.saturating_sub(2)).map(Role::Cb));
    roles.extend((1..=phases).map(Role::L));
    roles.extend([Role::Lo, Role::Co, Role::RLoad]);
    roles.extend((1..=phases).map(Role::S));
    roles.extend((1..=phases).map(Role::D));
    roles
}

/// Component counts implied by N: N switches, N diodes, N + 1 inductors and
/// N + 1 capacitors (two input, N − 2 blocking, one output).
pub fn expected_census(phases: usize) -> Census {
    Census {
        switches: phases,
        diodes: phases,
        inductors: phases + 1,
        capacitors: phases + 1,
    }
}
