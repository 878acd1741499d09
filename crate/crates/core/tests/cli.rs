use std::process::{Command, Output};

use hamflow::cli;
use hamflow::config::{RunConfig, KEYS};
use hamflow::Vec4;
use proptest::prelude::*;

fn hamflow(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_hamflow"))
        .args(args)
        .env_remove("HAMFLOW_SEED")
        .output()
        .unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn run_in_process(args: &[&str]) -> (i32, String) {
    let mut buf = Vec::new();
    let code = cli::run(std::iter::once("hamflow").chain(args.iter().copied()), &mut buf);
    (code, String::from_utf8(buf).unwrap())
}

#[test]
fn exponents_of_the_hyperbolic_drift() {
    let o = hamflow(&["exponents", "--system", "hyperbolic-drift", "--T", "10", "--no-timestamp"]);
    assert_eq!(o.status.code(), Some(0));
    let text = stdout(&o);
    let mut lines = text.lines();
    assert_eq!(lines.next().unwrap(), "seed,x1,x2,x3,x4,T,lambda_plus,renorm_count,escaped");
    let row: Vec<&str> = lines.next().unwrap().split(',').collect();
    let lambda: f64 = row[6].parse().unwrap();
    assert!((lambda - 1.0).abs() < 1e-6);
}

#[test]
fn usage_errors_exit_with_two() {
    assert_eq!(hamflow(&["bogus"]).status.code(), Some(2));
    assert_eq!(hamflow(&["integrate", "--bogus", "1"]).status.code(), Some(2));
    assert_eq!(hamflow(&["integrate", "--method", "rk4"]).status.code(), Some(2));
    assert_eq!(hamflow(&["integrate", "--T", "1", "--dt", "0"]).status.code(), Some(2));
    assert_eq!(hamflow(&["integrate", "--system", "nope"]).status.code(), Some(2));
    assert_eq!(hamflow(&["--help"]).status.code(), Some(0));
}

#[test]
fn perturb_verify_exit_codes() {
    let ok = hamflow(&["perturb-verify", "--alpha", "0", "--no-timestamp"]);
    assert_eq!(ok.status.code(), Some(0));
    assert!(stdout(&ok).lines().any(|l| l == "c2=0"));
    let bad = hamflow(&["perturb-verify", "--alpha", "10", "--no-timestamp"]);
    assert_eq!(bad.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&bad.stderr).contains("C2 distance"));
}

#[test]
fn integrate_writes_every_step() {
    let (code, out) = run_in_process(&["integrate", "--system", "translation", "--T", "0.003", "--no-timestamp"]);
    assert_eq!(code, 0);
    let rows: Vec<&str> = out.lines().collect();
    assert_eq!(rows.len(), 5);
    assert!(rows[0].starts_with("t,y1,y2,y3,y4,H,F11"));
    assert!(rows[4].starts_with("3e-3,3e-3,0e0,0e0,0e0"));
}

#[test]
fn timestamp_comment_is_optional() {
    let (_, with) = run_in_process(&["integrate", "--system", "translation", "--T", "0.001"]);
    assert!(with.starts_with("# generated unix="));
    let (_, without) = run_in_process(&["integrate", "--system", "translation", "--T", "0.001", "--no-timestamp"]);
    assert!(without.starts_with("t,"));
}

#[test]
fn plot_data_format_uses_spaces() {
    let (_, out) = run_in_process(&["integrate", "--system", "translation", "--T", "0.001", "--format", "plot-data", "--no-timestamp"]);
    let lines: Vec<&str> = out.lines().collect();
    assert!(lines[0].starts_with("# t y1 y2 y3 y4 H"));
    assert_eq!(lines[2].split(' ').count(), 23);
    assert!(!out.contains(','));
}

#[test]
fn empty_region_writes_only_the_header() {
    let (code, out) = run_in_process(&["surface-scan", "--system", "translation", "--energy", "5", "--n", "4", "--no-timestamp"]);
    assert_eq!(code, 0);
    assert_eq!(out, "index,x1,x2,x3,x4,lambda_plus,m,class\n");
}

#[test]
fn surface_scan_classes() {
    let hyp = ["surface-scan", "--system", "hyperbolic-drift", "--n", "4", "--T", "5", "--half-width", "1e-6", "--no-timestamp"];
    let (code, out) = run_in_process(&hyp);
    assert_eq!(code, 0);
    assert!(out.lines().skip(1).all(|l| l.ends_with(",1,D(1)")), "{out}");
    let ell = ["surface-scan", "--system", "elliptic-drift", "--n", "4", "--T", "5", "--half-width", "0.5", "--no-timestamp"];
    let (_, out) = run_in_process(&ell);
    for l in out.lines().skip(1) {
        assert!(l.ends_with(",,Z-candidate"), "{l}");
        let lambda: f64 = l.split(',').nth(5).unwrap().parse().unwrap();
        assert!(lambda <= 1e-3);
    }
}

#[test]
fn config_file_and_flag_precedence() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("run.cfg");
    std::fs::write(&path, "# scan\nsystem=translation\nt=0.002\n").unwrap();
    let p = path.to_str().unwrap();
    let (code, out) = run_in_process(&["integrate", "--config", p, "--no-timestamp"]);
    assert_eq!(code, 0);
    assert_eq!(out.lines().count(), 4);
    let (_, out) = run_in_process(&["integrate", "--config", p, "--T", "0.001", "--no-timestamp"]);
    assert_eq!(out.lines().count(), 3);
    std::fs::write(&path, "colour=blue\n").unwrap();
    assert_eq!(run_in_process(&["integrate", "--config", p]).0, 2);
}

#[test]
fn output_file_receives_the_table() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("orbit.csv");
    let p = path.to_str().unwrap();
    let (code, out) = run_in_process(&["integrate", "--system", "translation", "--T", "0.001", "--out", p, "--no-timestamp"]);
    assert_eq!(code, 0);
    assert!(out.starts_with("integrate "));
    assert!(std::fs::read_to_string(&path).unwrap().starts_with("t,y1"));
}

#[test]
fn seed_from_environment_when_no_flag() {
    let base = ["surface-scan", "--system", "hyperbolic-drift", "--n", "2", "--T", "2", "--half-width", "1e-6", "--no-timestamp"];
    let run = |seed: Option<&str>, extra: &[&str]| {
        let mut c = Command::new(env!("CARGO_BIN_EXE_hamflow"));
        c.args(base).args(extra);
        match seed {
            Some(s) => c.env("HAMFLOW_SEED", s),
            None => c.env_remove("HAMFLOW_SEED"),
        };
        String::from_utf8(c.output().unwrap().stdout).unwrap()
    };
    assert_eq!(run(Some("9"), &[]), run(None, &["--seed", "9"]));
    assert_eq!(run(Some("1"), &["--seed", "9"]), run(None, &["--seed", "9"]));
    assert_ne!(run(Some("9"), &[]), run(Some("10"), &[]));
}

#[test]
fn catalog_lists_the_systems() {
    let (code, out) = run_in_process(&["catalog"]);
    assert_eq!(code, 0);
    for id in ["translation", "hyperbolic-drift", "elliptic-drift"] {
        assert!(out.lines().any(|l| l == id));
    }
}

#[test]
fn unknown_config_keys_are_rejected() {
    let mut c = RunConfig::default();
    assert!(c.set("colour", "blue").is_err());
    assert!(c.set("y0", "1,2,3").is_err());
    assert!(c.set("t", "abc").is_err());
    assert!(RunConfig::from_text("no equals sign").is_err());
    for k in KEYS {
        assert!(c.to_text().lines().any(|l| l.starts_with(&format!("{k}="))));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn config_text_round_trips(t in -1e3f64..1e3, dt in 1e-6f64..1.0, seed in any::<u64>(), y in prop::array::uniform4(-1e6f64..1e6), alpha in 0.0f64..10.0) {
        let mut c = RunConfig::default();
        c.t = t;
        c.dt = dt;
        c.seed = seed;
        c.y0 = Vec4::from(y);
        c.alpha = alpha;
        let back = RunConfig::from_text(&c.to_text()).unwrap();
        prop_assert_eq!(back.to_text(), c.to_text());
        prop_assert_eq!(back.y0, c.y0);
        prop_assert_eq!(back.t, c.t);
    }
}
