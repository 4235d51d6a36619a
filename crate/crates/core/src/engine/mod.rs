//! Piecewise-linear transient engine.

mod companion;
mod conduction;
mod network;
mod sim;
mod steady;
mod trace;

pub use companion::{assemble_companion, CompanionSystem, Integrator, StepMap};
pub use conduction::{first_violation, resolve_conduction, Tolerances};
pub use network::{Conduction, ConfigSystem, Network, NetworkSolution, StateLayout};
pub use sim::{
    simulate, simulate_from, switch_count, Engine, RunState, SimOptions, DEFAULT_STEPS_PER_CYCLE,
};
pub use steady::{run_to_steady_state, steady_with_engine, warm_start, SteadyOptions, SteadyState};
pub use trace::{time_average, Sample, StateVector, Trace};
