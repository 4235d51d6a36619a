use approx::assert_relative_eq;
use ladderbuck::analysis::{
    converter_schedule,
    formulas::{duty_for_gain_exact, ideal_gain_exact},
    ideal_gain, steady_metrics, steady_run, stress_formulas, vsb_charge_residuals,
};
use ladderbuck::engine::{
    run_to_steady_state, simulate, warm_start, SimOptions, StateLayout, StateVector, SteadyOptions,
};
use ladderbuck::gates::interleaved_schedule;
use ladderbuck::regulator::{quantize_sense, reconstruct_vin, SensingChain};
use ladderbuck::spec::ConverterSpec;
use ladderbuck::topology::build_converter;
use num_rational::Ratio;
use proptest::prelude::*;

fn phases() -> impl Strategy<Value = usize> {
    prop_oneof![Just(4usize), Just(6), Just(8), Just(10), Just(12)]
}

proptest! {
    #[test]
    fn gain_inverse_is_exact(n in phases(), num in 1i128..1000) {
        let limit = Ratio::new(2, n as i128);
        let d = Ratio::new(num, 1000) * limit;
        prop_assume!(d < limit);
        prop_assert_eq!(duty_for_gain_exact(n, ideal_gain_exact(n, d)), d);
    }

    #[test]
    fn ladder_steps_are_equal(n in phases(), frac in 0.01f64..0.99, vin in 10.0f64..1000.0) {
        let d = frac * 2.0 / n as f64;
        let f = stress_formulas(n, vin, d, None);
        let step = vin / (n as f64 - d);
        let m = n / 2;
        prop_assert_eq!(f.v_cb.len(), n - 2);
        for leg in [&f.v_cb[..m - 1], &f.v_cb[m - 1..]] {
            let mut above = f.v_c1;
            for v in leg {
                assert_relative_eq!(above - v, step, max_relative = 1e-12);
                above = *v;
            }
            assert_relative_eq!(above, step, max_relative = 1e-12);
        }
        assert_relative_eq!(f.v_c1, f.v_c2);
        assert_relative_eq!(f.v_c1 + f.v_c2 - vin, f.v_out, max_relative = 1e-9, epsilon = 1e-9);
        assert_relative_eq!(f.gain, ideal_gain(n, d), max_relative = 1e-12);
    }

    #[test]
    fn interleaved_gates_share_duty_and_stagger(n in phases(), d in 0.0f64..0.99, fsw in 1e3f64..1e6) {
        let s = interleaved_schedule(n, d, fsw).unwrap();
        let duty = s.duty_frac();
        let mut starts = Vec::new();
        for k in 1..=n {
            let sig = s.signal(k);
            prop_assert_eq!(sig.on_fraction(), duty);
            starts.push(s.offset(k));
        }
        for k in 1..n {
            prop_assert_eq!(starts[k] - starts[k - 1], Ratio::new(1, n as i64));
        }
        let ceiling = (n as f64 * d).ceil() as usize;
        prop_assert!(s.max_overlap() <= ceiling.max(1));
    }

    #[test]
    fn quantizer_is_monotone_and_within_one_lsb(a in 0.0f64..505.0, b in 0.0f64..505.0) {
        let chain = SensingChain::default();
        let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
        prop_assert!(quantize_sense(lo, &chain).code <= quantize_sense(hi, &chain).code);
        let lsb = chain.full_scale * chain.divider_ratio / chain.max_code() as f64;
        let err = (reconstruct_vin(quantize_sense(a, &chain).code, &chain) - a).abs();
        prop_assert!(err <= 0.5 * lsb + 1e-9);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(4))]

    #[test]
    fn steady_output_scales_with_input(scale in 0.25f64..2.0) {
        let base = ConverterSpec::table1(0.2);
        let scaled = ConverterSpec { vin: base.vin * scale, ..base.clone() };
        let steps = 1000;
        let (_, a) = steady_run(&base, steps, SteadyOptions::default()).unwrap();
        let (_, b) = steady_run(&scaled, steps, SteadyOptions::default()).unwrap();
        assert_relative_eq!(b.v_out_mean, scale * a.v_out_mean, max_relative = 1e-5);
    }
}

#[test]
fn zero_state_reaches_the_warm_start_cycle() {
    let spec = ConverterSpec::table1(0.2);
    let net = build_converter(&spec).unwrap();
    let mut sim = SimOptions::for_netlist(&net);
    sim.steps_per_cycle = 1000;
    let roles = StateLayout::of(&net).roles().to_vec();
    let schedule = converter_schedule(&spec).unwrap();
    let opts = SteadyOptions::default();
    let cold = run_to_steady_state(
        &net,
        &schedule,
        &StateVector::zeros(roles.clone()),
        sim.clone(),
        opts,
    )
    .unwrap();
    let warm = run_to_steady_state(&net, &schedule, &warm_start(&spec, &roles), sim, opts).unwrap();
    for (c, w) in cold.state.values().iter().zip(warm.state.values()) {
        assert!((c - w).abs() <= 1e-4 * w.abs().max(1.0), "{c} vs {w}");
    }
}

#[test]
fn zero_duty_drains_the_output() {
    let spec = ConverterSpec::table1(0.2);
    let net = build_converter(&spec).unwrap();
    let mut sim = SimOptions::for_netlist(&net);
    sim.steps_per_cycle = 1000;
    let roles = StateLayout::of(&net).roles().to_vec();
    let schedule = converter_schedule(&spec).unwrap().with_duty(0.0).unwrap();
    let steady = run_to_steady_state(
        &net,
        &schedule,
        &warm_start(&spec, &roles),
        sim,
        SteadyOptions::default(),
    )
    .unwrap();
    let report = steady_metrics(&steady.trace, &spec).unwrap();
    assert!(report.v_out_mean.abs() < 1e-3, "{}", report.v_out_mean);
}

#[test]
fn balance_residuals_flag_a_transient() {
    let spec = ConverterSpec::table1(0.235);
    let net = build_converter(&spec).unwrap();
    let trace = simulate(
        &net,
        &converter_schedule(&spec).unwrap(),
        2.0 * spec.period(),
        1000,
    )
    .unwrap();
    let residuals = vsb_charge_residuals(&trace).unwrap();
    assert!(residuals.max_inductor() > 1e-3 * spec.ideal_vout());
    assert!(residuals.max_capacitor() > 1e-3 * spec.rated_current());

    let (steady, _) = steady_run(&spec, 1000, SteadyOptions::default()).unwrap();
    let settled = vsb_charge_residuals(&steady.trace).unwrap();
    assert!(settled.max_inductor() < 1e-3 * spec.ideal_vout());
    assert!(settled.max_capacitor() < 1e-3 * spec.rated_current());
}
