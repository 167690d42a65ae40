//! End-to-end tests of the `dprm` binary.

use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn dprm(args: &[&str]) -> Command {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_dprm"));
    cmd.args(args).env_remove("DPRM_SEED").env("RUST_LOG", "off");
    cmd
}

fn run(cmd: &mut Command) -> Output {
    cmd.output().expect("spawn dprm")
}

fn path(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn synth(dir: &Path, name: &str, extra: &[&str]) -> std::path::PathBuf {
    let out = dir.join(name);
    let mut args = vec![
        "synth",
        "--n",
        "300",
        "--d",
        "4",
        "--gamma",
        "0.1",
        "--seed",
        "3",
        "--out",
        path(&out),
    ];
    args.extend_from_slice(extra);
    let o = run(&mut dprm(&args));
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    out
}

fn estimate_json(args: &[&str]) -> Value {
    let o = run(&mut dprm(args));
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = String::from_utf8(o.stdout).unwrap();
    assert_eq!(text.lines().count(), 1);
    serde_json::from_str(text.trim()).unwrap()
}

#[test]
fn synth_is_deterministic_and_writes_plan() {
    let dir = tempfile::tempdir().unwrap();
    let plan = dir.path().join("plan.json");
    let a = synth(dir.path(), "a.csv", &["--plan", path(&plan)]);
    let b = synth(dir.path(), "b.csv", &[]);
    let text = std::fs::read_to_string(&a).unwrap();
    assert_eq!(text, std::fs::read_to_string(b).unwrap());
    assert_eq!(text.lines().count(), 300);
    assert!(text.lines().all(|l| l.split(',').count() == 4));
    let plan: Value = serde_json::from_str(&std::fs::read_to_string(plan).unwrap()).unwrap();
    assert_eq!(plan["adversary"]["kind"], "constant_cluster");
    assert!(plan["m_prime"].as_u64().unwrap() > 0);
}

#[test]
fn estimate_emits_one_json_line_per_method() {
    let dir = tempfile::tempdir().unwrap();
    let data = synth(dir.path(), "d.csv", &[]);
    for method in ["dp_robust", "dp_plain", "dp_winsorized"] {
        let v = estimate_json(&[
            "estimate",
            "--input",
            path(&data),
            "--method",
            method,
            "--seed",
            "5",
            "--c-thresh",
            "3",
        ]);
        assert_eq!(v["method"], method);
        assert_eq!(v["params"]["n"], 300);
        assert_eq!(v["result"]["private_mean"].as_array().unwrap().len(), 4);
        assert!(v["result"]["noise_variance"].as_f64().unwrap() > 0.0);
        assert!(
            v["result"].get("robust_mean").is_none(),
            "release mode must not leak the pre-noise mean"
        );
    }
}

#[test]
fn diagnostic_mode_includes_filter_details() {
    let dir = tempfile::tempdir().unwrap();
    let data = synth(dir.path(), "d.csv", &[]);
    let v = estimate_json(&["estimate", "--input", path(&data), "--c-thresh", "3", "--diagnostic"]);
    assert_eq!(v["result"]["robust_mean"].as_array().unwrap().len(), 4);
    assert!(v["result"]["filter_diag"]["iterations"].is_u64());
}

#[test]
fn seed_flag_overrides_environment() {
    let dir = tempfile::tempdir().unwrap();
    let data = synth(dir.path(), "d.csv", &[]);
    let base = ["estimate", "--input", path(&data), "--c-thresh", "3"];
    let by_env = |seed: &str| {
        let o = run(dprm(&base).env("DPRM_SEED", seed));
        assert!(o.status.success());
        serde_json::from_slice::<Value>(&o.stdout).unwrap()
    };
    let env_11 = by_env("11");
    assert_eq!(env_11["params"]["seed"], 11);

    let mut with_flag: Vec<&str> = base.to_vec();
    with_flag.extend(["--seed", "12"]);
    let o = run(dprm(&with_flag).env("DPRM_SEED", "11"));
    let flagged: Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(flagged["params"]["seed"], 12);
    assert_ne!(flagged["result"]["private_mean"], env_11["result"]["private_mean"]);
}

#[test]
fn sweep_writes_records_and_table() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("s.cfg");
    std::fs::write(&config, "n_values = 100\nd_values = 2, 3\ntrials = 2\nc_thresh = 4\n").unwrap();
    let (out, table) = (dir.path().join("r.csv"), dir.path().join("t.csv"));
    let o = run(&mut dprm(&[
        "sweep",
        "--config",
        path(&config),
        "--out",
        path(&out),
        "--table",
        path(&table),
    ]));
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let records = std::fs::read_to_string(&out).unwrap();
    assert!(records.starts_with("method,n,d,gamma,epsilon,tau,c_thresh,trial,seed,l2_error,"));
    assert_eq!(records.lines().count(), 1 + 2 * 2 * 3);
    assert_eq!(std::fs::read_to_string(&table).unwrap().lines().count(), 1 + 2);

    // The environment seed replaces base_seed and changes the output.
    let other = dir.path().join("r2.csv");
    let o = run(dprm(&["sweep", "--config", path(&config), "--out", path(&other)]).env("DPRM_SEED", "5"));
    assert!(o.status.success());
    assert_ne!(records, std::fs::read_to_string(other).unwrap());
}

#[test]
fn calibrate_prints_a_grid_value() {
    let o = run(&mut dprm(&[
        "calibrate",
        "--n",
        "500",
        "--d",
        "5",
        "--trials",
        "10",
        "--seed",
        "1",
    ]));
    assert!(o.status.success());
    let c: f64 = String::from_utf8(o.stdout).unwrap().trim().parse().unwrap();
    assert!((0.05..=100.0).contains(&c));
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(run(&mut dprm(&["--help"])).status.code(), Some(0));
    assert_eq!(run(&mut dprm(&["--version"])).status.code(), Some(0));
    assert_eq!(run(&mut dprm(&["frobnicate"])).status.code(), Some(1));
    assert_eq!(run(&mut dprm(&["estimate"])).status.code(), Some(1));

    let bad_cfg = dir.path().join("bad.cfg");
    std::fs::write(&bad_cfg, "n_values = 100\nd_values = 2\nbogus = 1\n").unwrap();
    assert_eq!(
        run(&mut dprm(&["sweep", "--config", path(&bad_cfg)])).status.code(),
        Some(1)
    );

    let data = synth(dir.path(), "d.csv", &[]);
    let bad_gamma = run(&mut dprm(&["estimate", "--input", path(&data), "--gamma", "0.7"]));
    assert_eq!(bad_gamma.status.code(), Some(1));

    let missing = dir.path().join("missing.csv");
    assert_eq!(
        run(&mut dprm(&["estimate", "--input", path(&missing)])).status.code(),
        Some(2)
    );

    let garbage = dir.path().join("garbage.csv");
    std::fs::write(&garbage, "1,2\n3,x\n").unwrap();
    let o = run(&mut dprm(&["estimate", "--input", path(&garbage)]));
    assert_ne!(o.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&o.stderr).contains("line 2"));
}
