use std::path::Path;
use std::process::Command;

use lp_hodge::input::random_bandlimited;
use lp_hodge::io::load_gfn;
use lp_hodge::probe::PROBE_CSV_HEADER;
use lp_hodge::GridSpec;
use serde_json::Value;

fn lp_hodge(out: &Path, args: &[&str]) -> i32 {
    let status = Command::new(env!("CARGO_BIN_EXE_lp-hodge"))
        .args(args)
        .arg("--out")
        .arg(out)
        .env_remove("LP_HODGE_THREADS")
        .status()
        .expect("binary runs");
    status.code().expect("exit code")
}

fn report(out: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(out.join("report.json")).unwrap()).unwrap()
}

#[test]
fn approx_on_zero_input_reports_zeros() {
    let dir = tempfile::tempdir().unwrap();
    let code = lp_hodge(dir.path(), &["approx", "--set", "grid.n=32", "--set", "input.amplitude=0"]);
    assert_eq!(code, 0);
    let r = report(dir.path());
    assert_eq!(r["schema"], "lp-hodge/1");
    assert_eq!(r["ok"], true);
    let rep = &r["result"]["report"];
    assert_eq!(rep["zero_input"], true);
    assert_eq!(rep["sup_approx"], 0.0);
    assert_eq!(rep["tl_norm_f"], 0.0);
    let csv = std::fs::read_to_string(dir.path().join("diagnostics.csv")).unwrap();
    assert_eq!(csv, format!("{PROBE_CSV_HEADER}\n"));
}

#[test]
fn probe_writes_one_row_per_shift() {
    let dir = tempfile::tempdir().unwrap();
    let code = lp_hodge(dir.path(), &["probe", "--set", "grid.n=32", "--set", "probe.shifts=[4,16,64]"]);
    assert_eq!(code, 0);
    let csv = std::fs::read_to_string(dir.path().join("diagnostics.csv")).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines[0], PROBE_CSV_HEADER);
    assert_eq!(lines.len(), 4);
    assert!(lines[1..].iter().all(|l| l.starts_with("log-bound,") && l.ends_with(",true")));
}

#[test]
fn failed_check_exits_one() {
    let dir = tempfile::tempdir().unwrap();
    let code = lp_hodge(dir.path(), &["probe", "--set", "grid.n=32", "--set", "probe.slack=0.01"]);
    assert_eq!(code, 1);
    assert_eq!(report(dir.path())["ok"], false);
}

#[test]
fn config_errors_exit_two() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(lp_hodge(dir.path(), &["lp", "--set", "input.generator=noise"]), 2);
    assert_eq!(lp_hodge(dir.path(), &["lp", "--set", "grid.n=12"]), 2);
    assert_eq!(lp_hodge(dir.path(), &["lp", "--config", "/nonexistent/config.json"]), 2);
    assert_eq!(lp_hodge(dir.path(), &["hodge", "--set", "grid.n=16", "--set", "hodge.l=0"]), 2);
}

#[test]
fn identical_configs_give_identical_reports() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let args = ["approx", "--set", "grid.n=32", "--set", "input.seed=5"];
    assert_eq!(lp_hodge(a.path(), &args), 0);
    assert_eq!(lp_hodge(b.path(), &args), 0);
    // the output directory is part of the echoed config, so align it first
    let norm = |p: &Path| {
        let mut v = report(p);
        v["config"]["output"]["dir"] = Value::Null;
        serde_json::to_string(&v).unwrap()
    };
    assert_eq!(norm(a.path()), norm(b.path()));
    let text = std::fs::read_to_string(a.path().join("report.json")).unwrap();
    let reparsed: Value = serde_json::from_str(&text).unwrap();
    assert_eq!(serde_json::to_string_pretty(&reparsed).unwrap() + "\n", text);
    assert!(a.path().join("run_info.json").exists());
}

#[test]
fn config_file_and_overrides_compose() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("cfg.json");
    std::fs::write(&cfg, r#"{"command": "lp", "grid": {"d": 1, "n": 16}, "input": {"bands": [1]}}"#).unwrap();
    let out = dir.path().join("out");
    assert_eq!(lp_hodge(&out, &["--config", cfg.to_str().unwrap(), "--set", "input.seed=3"]), 0);
    let r = report(&out);
    assert_eq!(r["command"], "lp");
    assert_eq!(r["config"]["grid"]["n"], 16);
    assert_eq!(r["config"]["input"]["seed"], 3);
}

#[test]
fn sigma_sweep_matches_individual_runs() {
    let dir = tempfile::tempdir().unwrap();
    let sweep = dir.path().join("sweep");
    let base = ["approx", "--set", "grid.n=32", "--set", "input.seed=2"];
    let mut args = base.to_vec();
    args.extend(["--set", "approx.sigma_sweep=[1,2,3]"]);
    assert_eq!(lp_hodge(&sweep, &args), 0);
    let table = report(&sweep)["result"]["sweep"].as_array().unwrap().clone();
    assert_eq!(table.len(), 3);
    let good: Vec<f64> = table.iter().map(|row| row["good_error"].as_f64().unwrap()).collect();
    assert!(good.windows(2).all(|w| w[1] <= w[0] * 1.05), "{good:?}");
    for row in &table {
        let s = row["sigma"].as_u64().unwrap();
        let single = dir.path().join(format!("s{s}"));
        let set = format!("approx.sigma={s}");
        let mut a = base.to_vec();
        a.extend(["--set", set.as_str()]);
        lp_hodge(&single, &a);
        let rep = &report(&single)["result"]["report"];
        assert_eq!(rep["good_error"], row["good_error"]);
        assert_eq!(rep["all_error"], row["all_error"]);
    }
}

#[test]
fn field_dumps_reload_bit_identically() {
    let dir = tempfile::tempdir().unwrap();
    let code = lp_hodge(
        dir.path(),
        &["approx", "--set", "grid.n=32", "--set", "input.seed=9", "--set", "output.dump_fields=true", "--dump-control"],
    );
    assert_eq!(code, 0);
    let spec = GridSpec::standard(2, 32).unwrap();
    let expected = random_bandlimited(&spec, &[1, 2, 3, 4], 9, 1.0).unwrap();
    assert_eq!(load_gfn(dir.path().join("input.gfn")).unwrap(), expected);
    let omega = load_gfn(dir.path().join("control").join("omega_1.gfn")).unwrap();
    assert!(omega.samples().iter().all(|z| z.re >= 0.0 && z.im == 0.0));
    assert!(dir.path().join("approx.gfn").exists());
}

#[test]
fn hodge_writes_forms() {
    let dir = tempfile::tempdir().unwrap();
    let code = lp_hodge(
        dir.path(),
        &["hodge", "--set", "grid.n=16", "--set", "input.bands=[1]", "--set", "output.dump_fields=true"],
    );
    assert_eq!(code, 0);
    let r = report(dir.path());
    assert_eq!(r["result"]["report"]["converged"], true);
    let psi = lp_hodge::hodge::Form::load(dir.path().join("psi")).unwrap();
    assert_eq!(psi.degree(), 1);
}
