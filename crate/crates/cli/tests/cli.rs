use std::fs;
use std::process::{Command, Output};

fn spinfid(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_spinfid"))
        .args(args)
        .output()
        .expect("spawn spinfid")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn field(text: &str, key: &str) -> f64 {
    let line = text
        .lines()
        .find(|l| l.starts_with(key))
        .unwrap_or_else(|| panic!("no {key} in\n{text}"));
    line[key.len()..]
        .split_whitespace()
        .next()
        .unwrap()
        .parse()
        .unwrap()
}

#[test]
fn run_reports_fidelity_and_pulse_count() {
    let o = spinfid(&[
        "run", "--L", "6", "--J", "1", "--a", "100", "--omega", "0.118",
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = stdout(&o);
    let f = field(&text, "F_exact");
    assert!(f > 0.0 && f < 1.0, "{f}");
    assert_eq!(field(&text, "pulses"), 10.0);
    assert!(!text.contains("F_pert"));
}

#[test]
fn run_both_shows_both_fidelities() {
    let o = spinfid(&["run", "--L", "4", "--propagator", "both"]);
    assert!(o.status.success());
    let text = stdout(&o);
    let fe = field(&text, "F_exact");
    let fp = field(&text, "F_pert");
    assert!((fe - fp).abs() < 0.01, "{fe} vs {fp}");
}

#[test]
fn run_dump_lists_every_basis_state() {
    let o = spinfid(&["run", "--L", "3", "--dump"]);
    assert!(o.status.success());
    let text = stdout(&o);
    assert_eq!(text.matches("# index bits re im prob").count(), 2);
    assert!(text.contains("\n5 101 "), "{text}");
}

#[test]
fn two_spins_is_an_error() {
    let o = spinfid(&["run", "--L", "2"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("L = 2"));
}

#[test]
fn usage_errors_exit_one() {
    assert_eq!(spinfid(&["bogus"]).status.code(), Some(1));
    assert_eq!(spinfid(&["run", "--J", "abc"]).status.code(), Some(1));
    assert_eq!(
        spinfid(&["run", "--propagator", "magic"]).status.code(),
        Some(1)
    );
    assert_eq!(spinfid(&["sweep", "--param", "J"]).status.code(), Some(1));
    assert_eq!(spinfid(&["--help"]).status.code(), Some(0));
}

#[test]
fn strict_validation_exits_two() {
    // 4J = a sits on a fake transition.
    let o = spinfid(&["validate", "--J", "25", "--strict"]);
    assert_eq!(o.status.code(), Some(2));
    let o = spinfid(&["run", "--L", "4", "--J", "25", "--strict"]);
    assert_eq!(o.status.code(), Some(2));
    let o = spinfid(&["validate", "--J", "25"]);
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).contains("not selective"));
    let o = spinfid(&["validate", "--strict"]);
    assert_eq!(o.status.code(), Some(0));
}

#[test]
fn ambiguous_pairing_exits_three() {
    let o = spinfid(&["run", "--L", "6", "--J", "25", "--propagator", "pert"]);
    assert_eq!(
        o.status.code(),
        Some(3),
        "{}",
        String::from_utf8_lossy(&o.stderr)
    );
}

#[test]
fn sweep_csv_is_stable_and_ordered() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.csv");
    let b = dir.path().join("b.csv");
    let args = |p: &str| {
        vec![
            "sweep".to_string(),
            "--L".into(),
            "4".into(),
            "--param".into(),
            "J".into(),
            "--from".into(),
            "0.5".into(),
            "--to".into(),
            "3".into(),
            "--steps".into(),
            "6".into(),
            "--out".into(),
            p.into(),
        ]
    };
    for p in [&a, &b] {
        let args = args(p.to_str().unwrap());
        let args: Vec<&str> = args.iter().map(String::as_str).collect();
        assert!(spinfid(&args).status.success());
    }
    let ta = fs::read(&a).unwrap();
    assert_eq!(ta, fs::read(&b).unwrap());
    let text = String::from_utf8(ta).unwrap();
    let mut lines = text.lines();
    assert_eq!(
        lines.next(),
        Some("param,value,f_exact,f_pert,one_minus_f,status,flags")
    );
    let values: Vec<f64> = lines
        .map(|l| {
            let cols: Vec<&str> = l.split(',').collect();
            assert_eq!(cols.len(), 7, "{l}");
            assert_eq!(cols[0], "J");
            assert_eq!(cols[3], "");
            assert_eq!(cols[5], "ok");
            let f: f64 = cols[2].parse().unwrap();
            let omf: f64 = cols[4].parse().unwrap();
            assert!((1.0 - f - omf).abs() <= 1e-15);
            cols[1].parse().unwrap()
        })
        .collect();
    assert_eq!(values.len(), 6);
    assert!(values.windows(2).all(|w| w[0] < w[1]));
}

#[test]
fn single_point_sweep_matches_run() {
    let o = spinfid(&["sweep", "--L", "5", "--param", "J", "--values", "1.7"]);
    assert!(o.status.success());
    let csv = stdout(&o);
    let row: Vec<&str> = csv.lines().nth(1).unwrap().split(',').collect();
    let f_sweep: f64 = row[2].parse().unwrap();
    let run = stdout(&spinfid(&["run", "--L", "5", "--J", "1.7"]));
    let f_run = field(&run, "F_exact");
    assert!((f_sweep - f_run).abs() < 1e-11, "{f_sweep} vs {f_run}");
}

#[test]
fn sweep_reports_failed_points_and_continues() {
    // J = 25 makes the perturbative pairing ambiguous; its neighbours run.
    let o = spinfid(&[
        "sweep",
        "--param",
        "J",
        "--values",
        "20,25,30",
        "--propagator",
        "pert",
    ]);
    assert!(o.status.success());
    let csv = stdout(&o);
    let status: Vec<&str> = csv
        .lines()
        .skip(1)
        .map(|l| l.split(',').nth(5).unwrap())
        .collect();
    assert_eq!(status[0], "ok");
    assert!(status[1].starts_with("error:"), "{}", status[1]);
    assert_eq!(status[2], "ok");
    let o = spinfid(&[
        "sweep",
        "--param",
        "J",
        "--values",
        "20,25",
        "--propagator",
        "pert",
        "--strict",
    ]);
    assert_eq!(o.status.code(), Some(3));
}

#[test]
fn config_file_with_flag_override() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.cfg");
    fs::write(&cfg, "# small chain\nL = 4\nJ = 3\nomega = 0.1\n").unwrap();
    let c = cfg.to_str().unwrap();
    let text = stdout(&spinfid(&["run", "--config", c]));
    assert!(text.starts_with("L = 4  J = 3 "), "{text}");
    let text = stdout(&spinfid(&["run", "--config", c, "--J", "2"]));
    assert!(text.starts_with("L = 4  J = 2 "), "{text}");

    fs::write(&cfg, "L = 4\nJ = three\n").unwrap();
    let o = spinfid(&["run", "--config", c]);
    assert_eq!(o.status.code(), Some(1));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("line 2") && err.contains("field J"), "{err}");
}

#[test]
fn chaos_reports_border_and_verdict() {
    let text = stdout(&spinfid(&["chaos", "--a", "100", "--J", "1", "--L", "6"]));
    assert_eq!(field(&text, "M_f"), 6.0);
    assert_eq!(field(&text, "(dE)_f"), 501.0);
    assert!((field(&text, "omega_cr (a + J/L)") - 100.166_666).abs() < 1e-3);
    assert!(text.contains("census               M_f in [6, 6]"));
    assert!(text.contains("no chaos"));
}

#[test]
fn slope_needs_three_lengths() {
    let o = spinfid(&["slope", "--from", "4", "--to", "5"]);
    assert_eq!(o.status.code(), Some(1));
    let o = spinfid(&["slope", "--from", "3", "--to", "6", "--J", "5"]);
    assert!(o.status.success());
    let text = stdout(&o);
    assert!(field(&text, "slope") < 0.0);
    assert!((field(&text, "m_th") + 0.118f64.powi(2) / 100.0).abs() < 1e-9);
}

#[test]
fn protocol_dump_table() {
    let text = stdout(&spinfid(&["protocol-dump", "--L", "4"]));
    let rows: Vec<&str> = text.lines().filter(|l| !l.starts_with('#')).collect();
    assert_eq!(rows.len(), 6);
    assert!(
        rows[0].starts_with("1 ") && rows[0].ends_with(" 0000 3"),
        "{}",
        rows[0]
    );
}
