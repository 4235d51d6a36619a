use std::fs;

use ladderbuck_cli::{run_command, EXIT_ACCEPTANCE, EXIT_CONFIG, EXIT_CONTRACT, EXIT_OK};

fn run(args: &[&str]) -> i32 {
    run_command(std::iter::once("ladderbuck").chain(args.iter().copied()))
}

#[test]
fn analyze_presets() {
    assert_eq!(run(&["analyze", "--config", "eightphase-400.cfg"]), EXIT_OK);
    assert_eq!(
        run(&["analyze", "--config", "table1.cfg", "--simulate"]),
        EXIT_OK
    );
}

#[test]
fn contract_check_passes_shipped_netlists() {
    assert_eq!(run(&["contract-check", "--config", "table1.cfg"]), EXIT_OK);
    assert_eq!(
        run(&["contract-check", "--config", "eightphase-400.cfg"]),
        EXIT_OK
    );
    assert_ne!(EXIT_CONTRACT, EXIT_OK);
}

#[test]
fn simulate_writes_csv_and_svg() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("trace.csv");
    let svg = dir.path().join("trace.svg");
    let code = run(&[
        "simulate",
        "--config",
        "table1.cfg",
        "--out",
        csv.to_str().unwrap(),
        "--svg",
        svg.to_str().unwrap(),
        "--signals",
        "il_1,il_2,il_3,il_4",
    ]);
    assert_eq!(code, EXIT_OK);
    let text = fs::read_to_string(&csv).unwrap();
    let header = text.lines().next().unwrap();
    assert!(
        header.starts_with("t,il_1,il_2,il_3,il_4,il_o,vc_1,vc_2,vcb_1,vcb_2,vc_o,i_in,v_out,v_f,")
    );
    let plot = fs::read_to_string(&svg).unwrap();
    assert_eq!(plot.matches("<polyline").count(), 4);
}

#[test]
fn outputs_are_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let mut outputs = Vec::new();
    for name in ["a.csv", "b.csv"] {
        let path = dir.path().join(name);
        let code = run(&[
            "simulate",
            "--config",
            "eightphase-400.cfg",
            "--cycles",
            "3",
            "--steps-per-cycle",
            "400",
            "--out",
            path.to_str().unwrap(),
        ]);
        assert_eq!(code, EXIT_OK);
        outputs.push(fs::read(&path).unwrap());
    }
    assert_eq!(outputs[0], outputs[1]);
}

#[test]
fn sweep_rows_follow_input_order() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("sweep.csv");
    let code = run(&[
        "sweep",
        "--config",
        "table1.cfg",
        "--param",
        "vin",
        "--from",
        "400",
        "--to",
        "100",
        "--count",
        "4",
        "--out",
        path.to_str().unwrap(),
    ]);
    assert_eq!(code, EXIT_OK);
    let text = fs::read_to_string(&path).unwrap();
    let values: Vec<f64> = text
        .lines()
        .skip(1)
        .map(|l| l.split(',').next().unwrap().parse().unwrap())
        .collect();
    assert_eq!(values, vec![400.0, 300.0, 200.0, 100.0]);
    assert_eq!(
        run(&[
            "sweep",
            "--config",
            "table1.cfg",
            "--param",
            "duty",
            "--from",
            "0.1",
            "--to",
            "0.2",
            "--count",
            "1"
        ]),
        EXIT_CONFIG
    );
}

#[test]
fn config_errors_exit_one() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.cfg");
    fs::write(
        &path,
        "phases = 5\nvin = 400\nfsw = 30e3\nduty = 0.2\nload_ohms = 1\n",
    )
    .unwrap();
    assert_eq!(
        run(&["analyze", "--config", path.to_str().unwrap()]),
        EXIT_CONFIG
    );
    assert_eq!(
        run(&["analyze", "--config", "no-such-preset.cfg"]),
        EXIT_CONFIG
    );
    assert_eq!(run(&["regulate", "--config", "table1.cfg"]), EXIT_CONFIG);
}

#[test]
fn invalid_duty_needs_flag() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("d70.cfg");
    fs::write(
        &path,
        "phases = 4\nvin = 400\nfsw = 30e3\nduty = 0.7\nload_ohms = 1.152\n",
    )
    .unwrap();
    let p = path.to_str().unwrap();
    assert_eq!(run(&["analyze", "--config", p]), EXIT_CONFIG);
    assert_eq!(run(&["analyze", "--config", p, "--allow-invalid"]), EXIT_OK);
}

#[test]
fn regulate_writes_update_log() {
    let dir = tempfile::tempdir().unwrap();
    let profile = dir.path().join("vin.csv");
    fs::write(&profile, "t,vin\n0,400\n0.0002,420\n").unwrap();
    let log = dir.path().join("log.csv");
    let code = run(&[
        "regulate",
        "--config",
        "eightphase-400.cfg",
        "--profile",
        profile.to_str().unwrap(),
        "--cycles",
        "10",
        "--steps-per-cycle",
        "400",
        "--out",
        log.to_str().unwrap(),
    ]);
    assert_eq!(code, EXIT_OK);
    let text = fs::read_to_string(&log).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("t,vin_true,code,vin_est,duty"));
    assert_eq!(lines.count(), 10);
}

#[test]
fn verify_reports_the_known_red_criterion() {
    assert_eq!(run(&["verify"]), EXIT_ACCEPTANCE);
}
