//! Command-line front end: `run_command(argv)` returns the process exit code.

use std::fmt::Write as _;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use ladderbuck::analysis::{
    crosscheck, ideal_gain, steady_metrics, stress_formulas, validity_check, SteadyReport,
};
use ladderbuck::config::{load_config_with, Scenario};
use ladderbuck::engine::{
    run_to_steady_state, simulate_from, warm_start, SimOptions, StateVector, SteadyOptions, Trace,
    DEFAULT_STEPS_PER_CYCLE,
};
use ladderbuck::regulator::{run_closed_loop, LoopOptions, VinProfile};
use ladderbuck::svg::write_svg;
use ladderbuck::topology::{build_converter, verify_mode_contract};
use ladderbuck::verify::run_acceptance;
use ladderbuck::Error;
use rayon::prelude::*;

pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 1;
pub const EXIT_CONVERGENCE: i32 = 2;
pub const EXIT_CONTRACT: i32 = 3;
pub const EXIT_ACCEPTANCE: i32 = 4;

#[derive(Parser, Debug)]
#[command(
    name = "ladderbuck",
    about = "N-phase series-capacitor step-down converter workbench"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug)]
struct Common {
    /// Scenario file, or the name of a built-in preset such as `table1.cfg`.
    #[arg(long)]
    config: PathBuf,
    /// Accept duty cycles at or beyond 2/N.
    #[arg(long)]
    allow_invalid: bool,
    #[arg(long, default_value_t = DEFAULT_STEPS_PER_CYCLE)]
    steps_per_cycle: usize,
}

#[derive(Args, Debug)]
struct Output {
    /// Output file; overrides the scenario's `out` key. Defaults to stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct Plot {
    /// Write an SVG plot of the selected signals.
    #[arg(long)]
    svg: Option<PathBuf>,
    /// Comma-separated trace columns to plot.
    #[arg(long, value_delimiter = ',', default_value = "v_out")]
    signals: Vec<String>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Closed-form gain, capacitor and device stresses.
    Analyze {
        #[command(flatten)]
        common: Common,
        /// Also simulate to steady state and compare against the formulas.
        #[arg(long)]
        simulate: bool,
    },
    /// Simulate and write the trace as CSV. Without `--cycles` the run is
    /// taken to periodic steady state and one period is written.
    Simulate {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        output: Output,
        #[command(flatten)]
        plot: Plot,
        /// Transient run of this many cycles from the zero state.
        #[arg(long)]
        cycles: Option<usize>,
    },
    /// Steady-state summary over a range of one parameter.
    Sweep {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        output: Output,
        #[arg(long, value_enum)]
        param: SweepParam,
        #[arg(long)]
        from: f64,
        #[arg(long)]
        to: f64,
        #[arg(long)]
        count: usize,
    },
    /// Feed-forward duty regulation from the sensed input voltage.
    Regulate {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        output: Output,
        #[command(flatten)]
        plot: Plot,
        /// CSV of `t,vin` breakpoints; defaults to the scenario's constant vin.
        #[arg(long)]
        profile: Option<PathBuf>,
        #[arg(long, default_value_t = 200)]
        cycles: usize,
    },
    /// Check the netlist against the per-mode ladder relations.
    ContractCheck {
        #[command(flatten)]
        common: Common,
    },
    /// Run the built-in acceptance suite.
    Verify,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
enum SweepParam {
    Duty,
    Vin,
    LoadOhms,
}

impl SweepParam {
    fn name(self) -> &'static str {
        match self {
            SweepParam::Duty => "duty",
            SweepParam::Vin => "vin",
            SweepParam::LoadOhms => "load_ohms",
        }
    }
}

struct Failure {
    code: i32,
    message: String,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::NonConvergence { .. }
            | Error::Conduction { .. }
            | Error::Singular(_)
            | Error::Trace(_) => EXIT_CONVERGENCE,
            _ => EXIT_CONFIG,
        };
        Failure {
            code,
            message: e.to_string(),
        }
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Error::from(e).into()
    }
}

type CmdResult = std::result::Result<i32, Failure>;

/// Parse `argv` (including the program name), run the command and return
/// its exit code. Reports go to stdout, diagnostics to stderr.
pub fn run_command<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
        }
    };
    let result = match cli.command {
        Command::Analyze { common, simulate } => analyze(&common, simulate),
        Command::Simulate {
            common,
            output,
            plot,
            cycles,
        } => simulate(&common, &output, &plot, cycles),
        Command::Sweep {
            common,
            output,
            param,
            from,
            to,
            count,
        } => sweep(&common, &output, param, from, to, count),
        Command::Regulate {
            common,
            output,
            plot,
            profile,
            cycles,
        } => regulate(&common, &output, &plot, profile.as_deref(), cycles),
        Command::ContractCheck { common } => contract_check(&common),
        Command::Verify => Ok(verify()),
    };
    match result {
        Ok(code) => code,
        Err(f) => {
            eprintln!("error: {}", f.message);
            f.code
        }
    }
}

fn load(common: &Common) -> Result<Scenario, Failure> {
    if common.steps_per_cycle < 16 {
        return Err(Failure {
            code: EXIT_CONFIG,
            message: format!(
                "--steps-per-cycle must be at least 16, got {}",
                common.steps_per_cycle
            ),
        });
    }
    Ok(load_config_with(&common.config, common.allow_invalid)?)
}

fn emit(text: &str, path: Option<&Path>) -> Result<(), Failure> {
    match path {
        Some(p) => std::fs::write(p, text)?,
        None => std::io::stdout().write_all(text.as_bytes())?,
    }
    Ok(())
}

fn out_path<'a>(output: &'a Output, scenario: &'a Scenario) -> Option<&'a Path> {
    output.out.as_deref().or(scenario.out.as_deref())
}

fn plot(trace: &Trace, plot: &Plot, scenario: &Scenario) -> Result<(), Failure> {
    if let Some(path) = plot.svg.as_deref().or(scenario.svg.as_deref()) {
        let signals: Vec<&str> = plot.signals.iter().map(String::as_str).collect();
        write_svg(trace, &signals, None, path)?;
    }
    Ok(())
}

fn analyze(common: &Common, simulate: bool) -> CmdResult {
    let scenario = load(common)?;
    let s = &scenario.spec;
    let mut text = scenario.header();
    text.push_str(&stress_formulas(s.phases, s.vin, s.duty, Some(s.load_ohms)).to_text());
    let verdict = validity_check(s.phases, s.duty);
    if let Some(w) = &verdict.warning {
        writeln!(text, "warning: {w}").expect("string write");
    }
    if simulate {
        let check = crosscheck(s, common.steps_per_cycle, SteadyOptions::default())?;
        text.push_str(&check.to_text());
    }
    emit(&text, None)?;
    Ok(EXIT_OK)
}

fn steady_trace(scenario: &Scenario, steps: usize) -> Result<(Trace, SteadyReport), Failure> {
    let net = build_converter(&scenario.spec)?;
    let mut sim = SimOptions::for_netlist(&net);
    sim.steps_per_cycle = steps;
    let x0 = warm_start(
        &scenario.spec,
        ladderbuck::engine::StateLayout::of(&net).roles(),
    );
    let steady = run_to_steady_state(
        &net,
        &scenario.schedule()?,
        &x0,
        sim,
        SteadyOptions::default(),
    )?;
    let report = steady_metrics(&steady.trace, &scenario.spec)?;
    Ok((steady.trace, report))
}

fn simulate(
    common: &Common,
    output: &Output,
    plot_args: &Plot,
    cycles: Option<usize>,
) -> CmdResult {
    let scenario = load(common)?;
    let trace = match cycles {
        Some(0) => {
            return Err(Failure {
                code: EXIT_CONFIG,
                message: "--cycles must be at least 1".into(),
            })
        }
        Some(c) => {
            let net = build_converter(&scenario.spec)?;
            let mut sim = SimOptions::for_netlist(&net);
            sim.steps_per_cycle = common.steps_per_cycle;
            let roles = ladderbuck::engine::StateLayout::of(&net).roles().to_vec();
            let t_end = c as f64 * scenario.spec.period();
            simulate_from(
                &net,
                &scenario.schedule()?,
                &StateVector::zeros(roles),
                t_end,
                sim,
            )?
            .0
        }
        None => {
            let (trace, report) = steady_trace(&scenario, common.steps_per_cycle)?;
            eprint!("{}", report.to_text());
            trace
        }
    };
    emit(&trace.to_csv_string(), out_path(output, &scenario))?;
    plot(&trace, plot_args, &scenario)?;
    Ok(EXIT_OK)
}

/// `count` evenly spaced values from `from` to `to` inclusive.
fn sweep_points(from: f64, to: f64, count: usize) -> Vec<f64> {
    (0..count)
        .map(|i| from + (to - from) * i as f64 / (count - 1) as f64)
        .collect()
}

fn sweep(
    common: &Common,
    output: &Output,
    param: SweepParam,
    from: f64,
    to: f64,
    count: usize,
) -> CmdResult {
    let scenario = load(common)?;
    if count < 2 || !from.is_finite() || !to.is_finite() {
        return Err(Failure {
            code: EXIT_CONFIG,
            message: format!(
                "sweep needs finite bounds and --count >= 2, got {from}..{to} x {count}"
            ),
        });
    }
    let points = sweep_points(from, to, count);
    let mut scenarios = Vec::with_capacity(count);
    for &value in &points {
        let mut point = scenario.clone();
        match param {
            SweepParam::Duty => point.spec.duty = value,
            SweepParam::Vin => point.spec.vin = value,
            SweepParam::LoadOhms => point.spec.load_ohms = value,
        }
        point.spec.validate()?;
        scenarios.push(point);
    }
    let rows: Vec<Result<SteadyReport, Failure>> = scenarios
        .par_iter()
        .map(|p| steady_trace(p, common.steps_per_cycle).map(|(_, r)| r))
        .collect();
    let mut text = format!(
        "{},v_out_mean,gain,formula_gain,efficiency,i_in_min,continuous,sharing_spread\n",
        param.name()
    );
    for ((value, row), point) in points.iter().zip(rows).zip(&scenarios) {
        let r = row?;
        writeln!(
            text,
            "{value},{},{},{},{},{},{},{}",
            r.v_out_mean,
            r.gain,
            ideal_gain(point.spec.phases, point.spec.duty),
            r.efficiency,
            r.i_in_min,
            r.continuous,
            r.sharing_spread
        )
        .expect("string write");
    }
    emit(&text, out_path(output, &scenario))?;
    Ok(EXIT_OK)
}

fn regulate(
    common: &Common,
    output: &Output,
    plot_args: &Plot,
    profile: Option<&Path>,
    cycles: usize,
) -> CmdResult {
    let scenario = load(common)?;
    let settings = scenario.regulator.clone().ok_or_else(|| Failure {
        code: EXIT_CONFIG,
        message: format!(
            "{}: regulate needs `vo_target` in the scenario",
            common.config.display()
        ),
    })?;
    let profile = match profile {
        Some(p) => VinProfile::load(p)?,
        None => VinProfile::constant(scenario.spec.vin),
    };
    settings.chain.check_range(profile.max())?;
    let opts = LoopOptions {
        cycles,
        steps_per_cycle: common.steps_per_cycle,
        ..LoopOptions::default()
    };
    let trace = run_closed_loop(
        &scenario.spec,
        &settings.chain,
        &settings.config,
        &profile,
        &opts,
    )?;
    let (_, last) = trace.cycle_vout.last().copied().unwrap_or((0.0, f64::NAN));
    eprintln!(
        "{} updates, {} saturated or clamped, final cycle-mean Vout = {last:.4} V (target {} V)",
        trace.updates.len(),
        trace.saturation_events(),
        settings.config.vo_target
    );
    emit(&trace.log_csv(), out_path(output, &scenario))?;
    plot(&trace.trace, plot_args, &scenario)?;
    Ok(EXIT_OK)
}

fn contract_check(common: &Common) -> CmdResult {
    let scenario = load(common)?;
    let net = build_converter(&scenario.spec)?;
    let report = verify_mode_contract(&net, &scenario.spec)?;
    emit(&report.to_text(), None)?;
    Ok(if report.passed() {
        EXIT_OK
    } else {
        EXIT_CONTRACT
    })
}

fn verify() -> i32 {
    let results = run_acceptance();
    let mut text = String::new();
    for r in &results {
        writeln!(text, "{}", r.line()).expect("string write");
    }
    let failed = results.iter().filter(|r| !r.pass).count();
    writeln!(
        text,
        "{} of {} criteria pass",
        results.len() - failed,
        results.len()
    )
    .expect("string write");
    print!("{text}");
    if failed == 0 {
        EXIT_OK
    } else {
        EXIT_ACCEPTANCE
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sweep_points_include_both_ends() {
        assert_eq!(sweep_points(0.1, 0.2, 2), vec![0.1, 0.2]);
        let p = sweep_points(100.0, 400.0, 4);
        assert_eq!(p, vec![100.0, 200.0, 300.0, 400.0]);
    }

    #[test]
    fn usage_errors_are_config_errors() {
        assert_eq!(run_command(["ladderbuck", "analyze"]), EXIT_CONFIG);
        assert_eq!(run_command(["ladderbuck", "--help"]), EXIT_OK);
    }
}
