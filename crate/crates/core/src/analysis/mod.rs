//! Closed-form results and their comparison with simulation.

mod crosscheck;
pub mod formulas;
mod metrics;

pub use crosscheck::{converter_schedule, crosscheck, steady_run, Crosscheck, CrosscheckRow};
pub use formulas::{
    duty_for_target, ideal_gain, stress_formulas, unchecked_duty, validity_check, FormulaReport,
    Verdict,
};
pub use metrics::{
    steady_metrics, vsb_charge_residuals, Residuals, SteadyReport, CONTINUITY_FRACTION,
};
