//! Event-aligned transient integration.

use std::collections::HashMap;
use std::rc::Rc;

use nalgebra::{DMatrix, DVector};
use num_rational::Ratio;
use num_traits::{One, Zero};

use crate::error::{Error, Result};
use crate::gates::{frac_to_f64, Frac, GateSchedule};
use crate::topology::{BranchKind, Netlist, Role};

use super::companion::{CompanionSystem, Integrator, StepMap};
use super::conduction::{resolve_with, Tolerances};
use super::network::{Conduction, ConfigSystem, Network};
use super::trace::{Sample, StateVector, Trace};

pub const DEFAULT_STEPS_PER_CYCLE: usize = 4000;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimOptions {
    /// Uniform steps per switching period, before edge subdivision.
    pub steps_per_cycle: usize,
    /// Backward-Euler steps taken after every configuration change.
    pub restart_steps: usize,
    pub tolerances: Tolerances,
    /// Samples earlier than this are not recorded.
    pub record_from: f64,
    /// Record every n-th step (1 records everything, including both limits
    /// at discontinuities).
    pub record_every: usize,
}

impl SimOptions {
    pub fn new(tolerances: Tolerances) -> Self {
        SimOptions {
            steps_per_cycle: DEFAULT_STEPS_PER_CYCLE,
            restart_steps: 2,
            tolerances,
            record_from: 0.0,
            record_every: 1,
        }
    }

    /// Tolerances scaled from the netlist's source and load.
    pub fn for_netlist(net: &Netlist) -> Self {
        let vin = net.by_role(Role::Vin).map_or(1.0, |b| b.value);
        let load = net.by_role(Role::RLoad).map_or(1.0, |b| b.value);
        Self::new(Tolerances::scaled(vin / load, vin))
    }
}

#[derive(Debug)]
struct Segment {
    start: Frac,
    h: f64,
    /// Switch states from this segment on, when it starts at a gate edge.
    switches: Option<Vec<bool>>,
}

#[derive(Debug)]
struct CyclePlan {
    segments: Vec<Segment>,
}

impl CyclePlan {
    fn build(schedule: &GateSchedule, steps: usize) -> Self {
        let edges = schedule.edges();
        let mut points: Vec<Frac> = (0..steps)
            .map(|k| Ratio::new(k as i64, steps as i64))
            .collect();
        points.extend(edges.iter().copied());
        points.sort();
        points.dedup();
        let mut segments = Vec::with_capacity(points.len());
        let mut previous: Option<Vec<bool>> = None;
        for (i, &start) in points.iter().enumerate() {
            let end = points.get(i + 1).copied().unwrap_or_else(Frac::one);
            let states = schedule.states_at_frac(start);
            let switches = if previous.as_ref() != Some(&states) || start.is_zero() {
                previous = Some(states.clone());
                Some(states)
            } else {
                None
            };
            segments.push(Segment {
                start,
                h: frac_to_f64(end - start) * schedule.period(),
                switches,
            });
        }
        CyclePlan { segments }
    }
}

type PlanKey = (i64, i64, Vec<(i64, i64)>, u64, usize);

fn plan_key(schedule: &GateSchedule, steps: usize) -> PlanKey {
    let d = schedule.duty_frac();
    (
        *d.numer(),
        *d.denom(),
        (1..=schedule.switches())
            .map(|k| {
                let o = schedule.offset(k);
                (*o.numer(), *o.denom())
            })
            .collect(),
        schedule.period().to_bits(),
        steps,
    )
}

/// Mutable integration state carried between cycles.
#[derive(Debug, Clone)]
pub struct RunState {
    pub t: f64,
    pub x: DVector<f64>,
    pub conduction: Conduction,
    restart: usize,
}

impl RunState {
    pub fn state(&self, roles: &[Role]) -> StateVector {
        StateVector::new(roles.to_vec(), self.x.iter().copied().collect())
            .expect("dimension checked")
    }
}

/// A netlist bound to its solver, with per-configuration caches.
pub struct Engine {
    network: Network,
    options: SimOptions,
    configs: HashMap<u128, Rc<ConfigSystem>>,
    steps: HashMap<(u128, u64, Integrator), Rc<StepMap>>,
    plans: HashMap<PlanKey, Rc<CyclePlan>>,
    vin_branch: Option<usize>,
    load_branch: Option<usize>,
}

impl Engine {
    pub fn new(netlist: &Netlist, options: SimOptions) -> Self {
        Engine {
            network: Network::new(netlist),
            options,
            configs: HashMap::new(),
            steps: HashMap::new(),
            plans: HashMap::new(),
            vin_branch: netlist.branch_index(Role::Vin),
            load_branch: netlist.branch_index(Role::RLoad),
        }
    }

    pub fn network(&self) -> &Network {
        &self.network
    }

    pub fn options(&self) -> &SimOptions {
        &self.options
    }

    pub fn options_mut(&mut self) -> &mut SimOptions {
        &mut self.options
    }

    pub fn state_roles(&self) -> Vec<Role> {
        self.network.layout().roles().to_vec()
    }

    pub fn vin(&self) -> Option<f64> {
        self.vin_branch
            .map(|b| self.network.netlist().branch(b).value)
    }

    /// Change the input source voltage. Cached systems depend on source
    /// values, so they are dropped.
    pub fn set_vin(&mut self, vin: f64) -> Result<()> {
        if self.vin() == Some(vin) {
            return Ok(());
        }
        self.network.set_value(Role::Vin, vin)?;
        self.configs.clear();
        self.steps.clear();
        Ok(())
    }

    pub fn config(&mut self, c: &Conduction) -> Result<Rc<ConfigSystem>> {
        config_cached(&self.network, &mut self.configs, c)
    }

    fn step_map(&mut self, c: &Conduction, h: f64, method: Integrator) -> Result<Rc<StepMap>> {
        let key = (c.key(), h.to_bits(), method);
        if let Some(map) = self.steps.get(&key) {
            return Ok(map.clone());
        }
        let sys = self.config(c)?;
        let map = Rc::new(CompanionSystem::from_config(&sys, h, method)?.step_map()?);
        self.steps.insert(key, map.clone());
        Ok(map)
    }

    fn plan(&mut self, schedule: &GateSchedule) -> Rc<CyclePlan> {
        let key = plan_key(schedule, self.options.steps_per_cycle);
        self.plans
            .entry(key)
            .or_insert_with(|| Rc::new(CyclePlan::build(schedule, self.options.steps_per_cycle)))
            .clone()
    }

    pub fn resolve(&mut self, start: Conduction, x: &DVector<f64>, t: f64) -> Result<Conduction> {
        let tol = self.options.tolerances;
        let network = &self.network;
        let configs = &mut self.configs;
        resolve_with(start, x, &tol, t, |c| config_cached(network, configs, c))
    }

    /// Integration state at `t` with switches from `schedule` and diodes
    /// resolved from all-conducting.
    pub fn start(&mut self, schedule: &GateSchedule, x0: &StateVector, t: f64) -> Result<RunState> {
        if x0.len() != self.network.state_dimension() {
            return Err(Error::Trace(format!(
                "initial state has {} entries, netlist needs {}",
                x0.len(),
                self.network.state_dimension()
            )));
        }
        if schedule.switches() != self.network.switch_branches().len() {
            return Err(Error::Gates(format!(
                "schedule drives {} switches, netlist has {}",
                schedule.switches(),
                self.network.switch_branches().len()
            )));
        }
        let x = DVector::from_column_slice(x0.values());
        let switches = schedule.states_at(t);
        let diodes = vec![true; self.network.diode_branches().len()];
        let conduction = self.resolve(Conduction::new(switches, diodes), &x, t)?;
        Ok(RunState {
            t,
            x,
            conduction,
            restart: self.options.restart_steps,
        })
    }

    pub fn new_trace(&self, period: f64) -> Trace {
        Trace::new(
            period,
            self.state_roles(),
            self.network.switch_branches().len(),
            self.network.diode_branches().len(),
        )
    }

    /// Build a sample of the network at `state`.
    pub fn sample(&mut self, conduction: &Conduction, x: &DVector<f64>, t: f64) -> Result<Sample> {
        let sys = self.config(conduction)?;
        let net = &self.network;
        let sol = net.expand(&sys, x);
        let layout = net.layout();
        let v_ind = (0..layout.inductors.len())
            .map(|s| net.inductor_voltage(&sol, s, x))
            .collect();
        let i_cap = layout
            .capacitors
            .iter()
            .map(|&b| sol.branch_currents[b])
            .collect();
        let (v_in, i_in) = match self.vin_branch {
            Some(b) => (net.netlist().branch(b).value, -sol.branch_currents[b]),
            None => (0.0, 0.0),
        };
        let p_out = self.load_branch.map_or(0.0, |b| {
            net.branch_voltage(&sol, b) * sol.branch_currents[b]
        });
        let v_out = net.netlist().output.map_or(0.0, |n| sol.node(n));
        let v_f = net.netlist().freewheel.map_or(0.0, |n| sol.node(n));
        let v_sw = net
            .switch_branches()
            .iter()
            .map(|&b| net.branch_voltage(&sol, b))
            .collect();
        let v_dio = net
            .diode_branches()
            .iter()
            .map(|&b| -net.branch_voltage(&sol, b))
            .collect();
        let i_dio = net
            .diode_branches()
            .iter()
            .map(|&b| sol.branch_currents[b])
            .collect();
        Ok(Sample {
            t,
            x: x.iter().copied().collect(),
            v_ind,
            i_cap,
            i_in,
            v_in,
            v_out,
            v_f,
            v_sw,
            v_dio,
            i_dio,
            diodes_on: conduction.diodes.clone(),
            p_in: v_in * i_in,
            p_out,
            p_diss: net.dissipation(&sol),
        })
    }

    fn record(&mut self, trace: Option<&mut Trace>, run: &RunState) -> Result<()> {
        if let Some(trace) = trace {
            if run.t >= self.options.record_from - 1e-15 {
                let s = self.sample(&run.conduction, &run.x, run.t)?;
                trace.samples.push(s);
            }
        }
        Ok(())
    }

    /// Integrate one switching period starting at `cycle_start` (which must
    /// be a whole number of periods). Stops early at `t_stop`. When
    /// `monodromy` is given it is left-multiplied by every step matrix.
    pub fn run_cycle(
        &mut self,
        run: &mut RunState,
        cycle_start: f64,
        schedule: &GateSchedule,
        mut monodromy: Option<&mut DMatrix<f64>>,
        mut trace: Option<&mut Trace>,
        t_stop: Option<f64>,
    ) -> Result<()> {
        let plan = self.plan(schedule);
        let period = schedule.period();
        let every = self.options.record_every.max(1);
        for (index, seg) in plan.segments.iter().enumerate() {
            let t0 = cycle_start + frac_to_f64(seg.start) * period;
            if let Some(stop) = t_stop {
                if t0 >= stop - 1e-15 * period.max(1.0) {
                    return Ok(());
                }
            }
            if let Some(sw) = &seg.switches {
                if *sw != run.conduction.switches {
                    let candidate = Conduction::new(sw.clone(), run.conduction.diodes.clone());
                    let resolved = self.resolve(candidate, &run.x, t0)?;
                    run.conduction = resolved;
                    run.restart = self.options.restart_steps;
                    if every == 1 {
                        self.record(trace.as_deref_mut(), run)?;
                    }
                }
            }
            let mut h = seg.h;
            let mut last = false;
            if let Some(stop) = t_stop {
                if t0 + h > stop {
                    h = stop - t0;
                    last = true;
                }
            }
            let method = if run.restart > 0 {
                run.restart -= 1;
                Integrator::BackwardEuler
            } else {
                Integrator::Trapezoidal
            };
            let map = self.step_map(&run.conduction.clone(), h, method)?;
            run.x = map.apply(&run.x);
            if let Some(p) = monodromy.as_deref_mut() {
                *p = &map.m * &*p;
            }
            run.t = if last || index + 1 == plan.segments.len() {
                if last {
                    t0 + h
                } else {
                    cycle_start + period
                }
            } else {
                cycle_start + frac_to_f64(plan.segments[index + 1].start) * period
            };
            if run.x.iter().any(|v| !v.is_finite()) {
                return Err(Error::Trace(format!("state diverged at t = {:e} s", run.t)));
            }
            let recorded = every == 1 || index % every == 0;
            if recorded {
                self.record(trace.as_deref_mut(), run)?;
            }
            let resolved = self.resolve(run.conduction.clone(), &run.x, run.t)?;
            if resolved != run.conduction {
                run.conduction = resolved;
                run.restart = self.options.restart_steps;
                if every == 1 {
                    self.record(trace.as_deref_mut(), run)?;
                }
            }
            if last {
                return Ok(());
            }
        }
        Ok(())
    }

    /// Integrate from `x0` at t = 0 to `t_end`.
    pub fn run(
        &mut self,
        schedule: &GateSchedule,
        x0: &StateVector,
        t_end: f64,
    ) -> Result<(Trace, StateVector)> {
        if !(t_end > 0.0) {
            return Err(Error::Trace(format!("t_end must be > 0, got {t_end}")));
        }
        let period = schedule.period();
        let mut run = self.start(schedule, x0, 0.0)?;
        let mut trace = self.new_trace(period);
        self.record(Some(&mut trace), &run)?;
        let cycles = (t_end / period - 1e-9).ceil().max(1.0) as usize;
        for c in 0..cycles {
            let start = c as f64 * period;
            self.run_cycle(
                &mut run,
                start,
                schedule,
                None,
                Some(&mut trace),
                Some(t_end),
            )?;
        }
        let roles = self.state_roles();
        Ok((trace, run.state(&roles)))
    }
}

fn config_cached(
    network: &Network,
    configs: &mut HashMap<u128, Rc<ConfigSystem>>,
    c: &Conduction,
) -> Result<Rc<ConfigSystem>> {
    let key = c.key();
    if let Some(sys) = configs.get(&key) {
        return Ok(sys.clone());
    }
    let sys = Rc::new(network.config_system(c)?);
    configs.insert(key, sys.clone());
    Ok(sys)
}

/// Transient run of `netlist` under `schedule` from the zero state.
pub fn simulate(
    netlist: &Netlist,
    schedule: &GateSchedule,
    t_end: f64,
    steps_per_cycle: usize,
) -> Result<Trace> {
    let mut options = SimOptions::for_netlist(netlist);
    options.steps_per_cycle = steps_per_cycle;
    let mut engine = Engine::new(netlist, options);
    let x0 = StateVector::zeros(engine.state_roles());
    Ok(engine.run(schedule, &x0, t_end)?.0)
}

/// Transient run from an explicit initial state with explicit options.
pub fn simulate_from(
    netlist: &Netlist,
    schedule: &GateSchedule,
    x0: &StateVector,
    t_end: f64,
    options: SimOptions,
) -> Result<(Trace, StateVector)> {
    let mut engine = Engine::new(netlist, options);
    engine.run(schedule, x0, t_end)
}

/// Number of switches in `netlist`.
pub fn switch_count(netlist: &Netlist) -> usize {
    netlist
        .branches()
        .iter()
        .filter(|b| b.kind == BranchKind::Switch)
        .count()
}
