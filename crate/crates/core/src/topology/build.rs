use crate::error::Result;
use crate::spec::ConverterSpec;

use super::netlist::{BranchKind, Netlist, NodeId, Role, GROUND};

/// One of the four nodes the input network can attach to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Terminal {
    Ground,
    RailA,
    RailB,
    Freewheel,
}

impl Terminal {
    pub const ALL: [Terminal; 4] = [
        Terminal::Ground,
        Terminal::RailA,
        Terminal::RailB,
        Terminal::Freewheel,
    ];
}

/// How the second leg's ladder hangs between its rail and the output side.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum LegStyle {
    /// Copy of leg A: high-side switches, diodes from ground, inductors into
    /// the freewheel node.
    Upright,
    /// Leg A reflected through the output: low-side switches returning to
    /// the rail, inductors drawn from ground, diodes into the freewheel node.
    Mirrored,
}

/// Placement of C1, C2 and the source, each as `(positive, negative)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Interconnect {
    pub c1: (Terminal, Terminal),
    pub c2: (Terminal, Terminal),
    pub vin: (Terminal, Terminal),
    pub leg_b: LegStyle,
}

impl Interconnect {
    /// The interconnection shipped by [`build_converter`]:
    /// C1 from rail A to ground, the source from rail A down to rail B, C2
    /// from the freewheel node down to rail B, and a mirrored second leg.
    pub const SHIPPED: Interconnect = Interconnect {
        c1: (Terminal::RailA, Terminal::Ground),
        c2: (Terminal::Freewheel, Terminal::RailB),
        vin: (Terminal::RailA, Terminal::RailB),
        leg_b: LegStyle::Mirrored,
    };
}

/// Build the N-phase converter netlist for `spec`.
pub fn build_converter(spec: &ConverterSpec) -> Result<Netlist> {
    spec.validate()?;
    let net = build_with(spec, &Interconnect::SHIPPED);
    net.validate_converter(spec.phases)?;
    Ok(net)
}

/// Build a candidate netlist with an arbitrary input interconnection.
/// No validation beyond construction.
pub fn build_with(spec: &ConverterSpec, ic: &Interconnect) -> Netlist {
    let mut net = Netlist::new(spec.losses);
    let rail_a = net.add_node("rail_a");
    let rail_b = net.add_node("rail_b");
    let f = net.add_node("f");
    let out = net.add_node("out");
    net.freewheel = Some(f);
    net.output = Some(out);

    let at = |t: Terminal| match t {
        Terminal::Ground => GROUND,
        Terminal::RailA => rail_a,
        Terminal::RailB => rail_b,
        Terminal::Freewheel => f,
    };
    net.add_branch(
        Role::Vin,
        BranchKind::VoltageSource,
        spec.vin,
        at(ic.vin.0),
        at(ic.vin.1),
    );
    net.add_branch(
        Role::C1,
        BranchKind::Capacitor,
        spec.c_in,
        at(ic.c1.0),
        at(ic.c1.1),
    );
    net.add_branch(
        Role::C2,
        BranchKind::Capacitor,
        spec.c_in,
        at(ic.c2.0),
        at(ic.c2.1),
    );

    let m = spec.legs();
    add_leg(&mut net, spec, rail_a, 1, 1, m, LegStyle::Upright, f);
    add_leg(&mut net, spec, rail_b, m + 1, m, m, ic.leg_b, f);

    net.add_branch(Role::Lo, BranchKind::Inductor, spec.l_out, f, out);
    net.add_branch(Role::Co, BranchKind::Capacitor, spec.c_out, out, GROUND);
    net.add_branch(
        Role::RLoad,
        BranchKind::Resistor,
        spec.load_ohms,
        out,
        GROUND,
    );
    net
}

/// One series-capacitor ladder of `m` phases fed from `rail`.
///
/// Ladder tap p sits between switch p and switch p + 1; blocking capacitor p
/// hangs from that tap down to phase p's inductor node.
#[allow(clippy::too_many_arguments)]
fn add_leg(
    net: &mut Netlist,
    spec: &ConverterSpec,
    rail: NodeId,
    first_phase: usize,
    first_cap: usize,
    m: usize,
    style: LegStyle,
    freewheel: NodeId,
) {
    let mut tap = rail;
    for p in 1..=m {
        let k = first_phase + p - 1;
        let j = first_cap + p - 1;
        let node = net.add_node(format!("n{k}"));
        let next = if p < m {
            net.add_node(format!("t{j}"))
        } else {
            node
        };
        match style {
            LegStyle::Upright => {
                net.add_branch(Role::S(k), BranchKind::Switch, 0.0, tap, next);
                if p < m {
                    net.add_branch(Role::Cb(j), BranchKind::Capacitor, spec.c_block, next, node);
                }
                net.add_branch(
                    Role::L(k),
                    BranchKind::Inductor,
                    spec.l_phase,
                    node,
                    freewheel,
                );
                net.add_branch(Role::D(k), BranchKind::Diode, 0.0, GROUND, node);
            }
            LegStyle::Mirrored => {
                net.add_branch(Role::S(k), BranchKind::Switch, 0.0, next, tap);
                if p < m {
                    net.add_branch(Role::Cb(j), BranchKind::Capacitor, spec.c_block, node, next);
                }
                net.add_branch(Role::L(k), BranchKind::Inductor, spec.l_phase, GROUND, node);
                net.add_branch(Role::D(k), BranchKind::Diode, 0.0, node, freewheel);
            }
        }
        tap = next;
    }
}

/// Number of dynamic states: N phase inductors, Lo, C1, C2, N − 2 blocking
/// capacitors and Co.
pub fn state_dimension(spec: &ConverterSpec) -> usize {
    2 * spec.phases + 2
}

/// Which leg a switch index belongs to (0 = A, 1 = B).
pub fn leg_of(phases: usize, k: usize) -> usize {
    if k <= phases / 2 {
        0
    } else {
        1
    }
}

/// Switch firing order for the converter: slots alternate between the two
/// legs, `S1, S(m+1), S2, S(m+2), …`, so that the on-intervals of two
/// switches of the same ladder are 2/N of a period apart.
pub fn firing_order(phases: usize) -> Vec<usize> {
    let m = phases / 2;
    (1..=m).flat_map(|p| [p, m + p]).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::topology::netlist::expected_census;

    #[test]
    fn census_matches_phase_count() {
        let net = build_converter(&ConverterSpec::table1(0.235)).unwrap();
        let c = net.census();
        assert_eq!(
            (c.switches, c.diodes, c.inductors, c.capacitors),
            (4, 4, 5, 5)
        );

        let net = build_converter(&ConverterSpec::eight_phase_prototype()).unwrap();
        let c = net.census();
        assert_eq!(
            (c.switches, c.diodes, c.inductors, c.capacitors),
            (8, 8, 9, 9)
        );
        assert_eq!(c, expected_census(8));
    }

    #[test]
    fn rejects_out_of_range_inputs() {
        let mut spec = ConverterSpec::eight_phase_prototype();
        spec.duty = 0.30;
        assert!(build_converter(&spec).is_err());
        spec.duty = 0.2;
        spec.phases = 7;
        assert!(build_converter(&spec).is_err());
        spec.phases = 2;
        assert!(build_converter(&spec).is_err());
    }

    #[test]
    fn state_dimension_counts() {
        let mut spec = ConverterSpec::table1(0.235);
        assert_eq!(state_dimension(&spec), 10);
        spec.phases = 8;
        assert_eq!(state_dimension(&spec), 18);
        assert_eq!(state_dimension(&ConverterSpec::table1(0.2)), 18 - 8);
    }

    #[test]
    fn firing_order_alternates_legs() {
        assert_eq!(firing_order(4), vec![1, 3, 2, 4]);
        assert_eq!(firing_order(8), vec![1, 5, 2, 6, 3, 7, 4, 8]);
        for w in firing_order(8).windows(2) {
            assert_ne!(leg_of(8, w[0]), leg_of(8, w[1]));
        }
    }
}
