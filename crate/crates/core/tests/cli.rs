use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

const BIN: &str = env!("CARGO_BIN_EXE_transport-recon");

fn config(extra: &str, grid: usize, d: &str, sigma: &str, f1: &str) -> String {
    format!(
        r#"
[grid]
nx = {grid}
ny = {grid}

[coefficients]
D_preset = "{d}"
sigma_preset = "{sigma}"

[boundary]
f1_preset = "{f1}"
f2_preset = "const(value=1)"
{extra}
"#
    )
}

fn affine(extra: &str) -> String {
    config(extra, 17, "const(value=1)", "const(value=0)", "linear_x(base=0, slope=1)")
}

fn bump(extra: &str) -> String {
    config(
        extra,
        17,
        "sin_bump(base=1, amplitude=0.5)",
        "const(value=0.5)",
        "gaussian_bump(cx=0.5, cy=0, width=0.3, width_y=0.225)",
    )
}

fn write_config(dir: &Path, text: &str) -> PathBuf {
    let path = dir.join("run.toml");
    fs::write(&path, text).unwrap();
    path
}

fn run(cmd: &str, cfg: &Path, out: &Path) -> Output {
    run_env(cmd, cfg, out, None)
}

fn run_env(cmd: &str, cfg: &Path, out: &Path, threads: Option<&str>) -> Output {
    let mut c = Command::new(BIN);
    c.args([cmd, "--config"]).arg(cfg).arg("--out").arg(out);
    match threads {
        Some(t) => c.env("TRANSPORT_RECON_THREADS", t),
        None => c.env_remove("TRANSPORT_RECON_THREADS"),
    };
    c.output().unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn json(path: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

fn files(dir: &Path) -> Vec<String> {
    let mut names: Vec<String> = fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().file_name().to_string_lossy().into_owned())
        .collect();
    names.sort();
    names
}

/// Every number finite; missing values are explicit nulls.
fn assert_finite(v: &Value, path: &str) {
    match v {
        Value::Number(n) => assert!(n.as_f64().unwrap().is_finite(), "{path}"),
        Value::Array(a) => a.iter().enumerate().for_each(|(i, x)| assert_finite(x, &format!("{path}[{i}]"))),
        Value::Object(m) => m.iter().for_each(|(k, x)| assert_finite(x, &format!("{path}.{k}"))),
        _ => {}
    }
}

fn keys(v: &Value) -> Vec<&str> {
    v.as_object().unwrap().keys().map(String::as_str).collect()
}

#[test]
fn forward_writes_grid_dumps_and_positivity() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), &affine(""));
    let out = tmp.path().join("fwd");
    let o = run("forward", &cfg, &out);
    assert!(o.status.success(), "{}", stderr(&o));
    assert_eq!(files(&out), ["summary.json", "u1.csv", "u2.csv"]);

    let u1 = fs::read_to_string(out.join("u1.csv")).unwrap();
    let mut lines = u1.lines();
    assert_eq!(lines.next().unwrap(), "17,17,0.0625,0.0625");
    let row0: Vec<f64> = lines.next().unwrap().split(',').map(|s| s.parse().unwrap()).collect();
    for (i, v) in row0.iter().enumerate() {
        assert!((v - i as f64 / 16.0).abs() < 1e-8);
    }

    let s = json(&out.join("summary.json"));
    assert_finite(&s, "summary");
    assert_eq!(s["positivity"]["u2"]["pass"], true);
    assert!(s["u1_exact_error"].as_f64().unwrap() < 1e-8);
    assert_eq!(s["data_grid"]["nx"], 65);
}

#[test]
fn log_forward_reports_closed_form_error() {
    let tmp = tempfile::tempdir().unwrap();
    let text = config("", 33, "linear_x(base=1, slope=1)", "const(value=0)", "log_x(scale=1)");
    let cfg = write_config(tmp.path(), &text);
    let o = run("forward", &cfg, tmp.path());
    assert!(o.status.success(), "{}", stderr(&o));
    let err = json(&tmp.path().join("summary.json"))["u1_exact_error"].as_f64().unwrap();
    assert!(err > 0.0 && err < 1e-5, "{err}");
}

#[test]
fn bad_preset_exits_1_naming_the_key() {
    let tmp = tempfile::tempdir().unwrap();
    let text = config("", 17, "wobble(a=1)", "const(value=0)", "linear_x(base=0, slope=1)");
    let cfg = write_config(tmp.path(), &text);
    let o = run("forward", &cfg, tmp.path());
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("coefficients.D_preset"), "{}", stderr(&o));
}

#[test]
fn unknown_key_and_missing_file_exit_1() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), &affine("[solver]\ntolerance = 1e-8\n"));
    let o = run("forward", &cfg, tmp.path());
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("tolerance"), "{}", stderr(&o));

    let o = run("forward", &tmp.path().join("nope.toml"), tmp.path());
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn solver_failure_exits_2() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), &bump("[solver]\nmax_iter = 2\n"));
    let o = run("reconstruct", &cfg, tmp.path());
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("did not converge"), "{}", stderr(&o));
}

#[test]
fn reconstruction_stage_failure_exits_3() {
    // u₂ touching zero passes parsing but cannot define u = u₁/u₂
    let tmp = tempfile::tempdir().unwrap();
    let zeros = format!("3,3,0.5,0.5\n{}", "0,0,0\n".repeat(3));
    fs::write(tmp.path().join("u.csv"), zeros).unwrap();
    let text = config(
        "[input]\nu1_csv = \"u.csv\"\nu2_csv = \"u.csv\"\n",
        3,
        "const(value=1)",
        "const(value=0)",
        "linear_x(base=0, slope=1)",
    );
    let cfg = write_config(tmp.path(), &text);
    let o = Command::new(BIN)
        .current_dir(tmp.path())
        .args(["reconstruct", "--config", "run.toml", "--out", "out"])
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(3), "{}", stderr(&o));
    assert!(cfg.exists());
}

#[test]
fn reconstruct_outputs_and_schema() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), &bump(""));
    let o = run("reconstruct", &cfg, tmp.path());
    assert!(o.status.success(), "{}", stderr(&o));
    assert_eq!(files(tmp.path()), ["D_rec.csv", "coverage.pgm", "run.toml", "sigma_rec.csv", "summary.json"]);

    let s = json(&tmp.path().join("summary.json"));
    assert_finite(&s, "summary");
    assert_eq!(
        keys(&s),
        [
            "command",
            "coverage_fraction",
            "coverage_monotonicity",
            "data_grid",
            "grid",
            "input",
            "metrics",
            "monotonicity",
            "presets",
            "residuals",
            "seeds",
            "solver",
            "streamline_count",
            "terminations"
        ]
    );
    assert!(s["input"].is_null());
    assert!(s["metrics"]["d_rel_l2"].as_f64().unwrap() < 0.05);
    assert_eq!(s["coverage_monotonicity"]["nondecreasing"], true);
    assert_eq!(s["monotonicity"]["violations"], 0);
    assert_eq!(s["terminations"]["max_steps"], 0);

    let pgm = fs::read_to_string(tmp.path().join("coverage.pgm")).unwrap();
    assert!(pgm.starts_with("P2\n16 16\n255\n"));
}

#[test]
fn formats_select_artifacts() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), &affine("[outputs]\nformats = [\"json\"]\n"));
    let out = tmp.path().join("o");
    let o = run("reconstruct", &cfg, &out);
    assert!(o.status.success(), "{}", stderr(&o));
    assert_eq!(files(&out), ["summary.json"]);

    let cfg = write_config(tmp.path(), &affine("[outputs]\nformats = [\"pgm\"]\n"));
    let out = tmp.path().join("p");
    run("reconstruct", &cfg, &out);
    assert_eq!(files(&out), ["coverage.pgm"]);
}

#[test]
fn out_flag_overrides_config_directory() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), &affine("[outputs]\ndirectory = \"elsewhere\"\n"));
    let out = tmp.path().join("here");
    assert!(run("forward", &cfg, &out).status.success());
    assert!(out.join("summary.json").exists());
    assert!(!tmp.path().join("elsewhere").exists());
}

#[test]
fn raw_input_disables_metrics() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), &bump(""));
    assert!(run("forward", &cfg, &tmp.path().join("fwd")).status.success());

    let input = format!(
        "[input]\nu1_csv = \"{}\"\nu2_csv = \"{}\"\n",
        tmp.path().join("fwd/u1.csv").display(),
        tmp.path().join("fwd/u2.csv").display()
    );
    let cfg = write_config(tmp.path(), &bump(&input));
    let out = tmp.path().join("raw");
    let o = run("reconstruct", &cfg, &out);
    assert!(o.status.success(), "{}", stderr(&o));
    let s = json(&out.join("summary.json"));
    assert_finite(&s, "summary");
    assert!(s["metrics"]["d_rel_l2"].is_null());
    assert!(s["metrics"]["sigma_rel_l2"].is_null());
    assert!(s["residuals"]["divergence_max"].is_null());
    assert!(s["solver"].is_null());
    assert!(s["coverage_fraction"].as_f64().unwrap() > 0.9);

    // the same data through the solver path gives the same D
    let solved = tmp.path().join("solved");
    let cfg = write_config(tmp.path(), &bump(""));
    assert!(run("reconstruct", &cfg, &solved).status.success());
    assert_eq!(fs::read(out.join("D_rec.csv")).unwrap(), fs::read(solved.join("D_rec.csv")).unwrap());
}

#[test]
fn raw_input_grid_mismatch_is_config_error() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), &affine(""));
    assert!(run("forward", &cfg, &tmp.path().join("fwd")).status.success());
    let input = format!(
        "[input]\nu1_csv = \"{0}\"\nu2_csv = \"{0}\"\n",
        tmp.path().join("fwd/u1.csv").display()
    );
    let text = config(&input, 9, "const(value=1)", "const(value=0)", "linear_x(base=0, slope=1)");
    let cfg = write_config(tmp.path(), &text);
    let o = run("reconstruct", &cfg, &tmp.path().join("x"));
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("input.u1_csv"), "{}", stderr(&o));
}

#[test]
fn verify_affine_residuals_vanish() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), &affine("[solver]\ntol = 1e-14\n"));
    let o = run("verify", &cfg, tmp.path());
    assert!(o.status.success(), "{}", stderr(&o));
    let v = json(&tmp.path().join("verify.json"));
    assert_finite(&v, "verify");
    for key in ["identity", "divergence"] {
        for side in ["coarse", "fine"] {
            assert!(v[key][side].as_f64().unwrap() <= 1e-10, "{key}.{side}");
        }
    }
    assert_eq!(v["resolutions"][0]["nx"], 9);
    assert_eq!(v["ratio_window"], serde_json::json!([3.0, 5.0]));
    assert_eq!(v["monotonicity"][1]["violations"], 0);
    assert_eq!(v["no_return"]["orbits_with_returns"], 0);
    assert_eq!(v["reconstruction"]["d_threshold"], 0.05);
    assert_eq!(v["reconstruction"]["sigma_threshold"], 0.15);
    assert!(v["reconstruction"]["sigma_pass"].is_null());
}

#[test]
fn verify_needs_odd_grid() {
    let tmp = tempfile::tempdir().unwrap();
    let text = config("", 16, "const(value=1)", "const(value=0)", "linear_x(base=0, slope=1)");
    let cfg = write_config(tmp.path(), &text);
    let o = run("verify", &cfg, tmp.path());
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("odd"));
}

#[test]
fn recur_demo_default_shows_dichotomy() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), &bump(""));
    let o = run("recur-demo", &cfg, tmp.path());
    assert!(o.status.success(), "{}", stderr(&o));
    assert_eq!(files(tmp.path()), ["orbits.csv", "recurrence.json", "run.toml"]);
    let r = json(&tmp.path().join("recurrence.json"));
    assert_finite(&r, "recurrence");
    assert!(r["control"]["returns"].as_u64().unwrap() >= 15);
    assert_eq!(r["suite"]["orbits_with_returns"], 0);
    assert_eq!(r["verdict"]["dichotomy"], true);
    let csv = fs::read_to_string(tmp.path().join("orbits.csv")).unwrap();
    assert!(csv.starts_with("orbit,k,x,y\ncontrol,0,0.5,0.45\n"));
}

#[test]
fn recur_demo_zero_control_and_k_zero() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), &affine("[recurrence]\nK = 12\ncontrol = \"zero\"\n"));
    assert!(run("recur-demo", &cfg, tmp.path()).status.success());
    let r = json(&tmp.path().join("recurrence.json"));
    assert_eq!(r["control"]["returns"], 12);
    assert_eq!(r["verdict"]["dichotomy"], true);

    let cfg = write_config(tmp.path(), &affine("[recurrence]\nK = 0\n"));
    let o = run("recur-demo", &cfg, tmp.path());
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("recurrence.K"));
}

#[test]
fn byte_identical_across_runs_and_thread_counts() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), &bump(""));
    let dirs = [("a", Some("1")), ("b", Some("3")), ("c", None)];
    for cmd in ["forward", "reconstruct", "verify", "recur-demo"] {
        let mut outputs = Vec::new();
        for (name, threads) in dirs {
            let out = tmp.path().join(cmd).join(name);
            let o = run_env(cmd, &cfg, &out, threads);
            assert!(o.status.success(), "{cmd}: {}", stderr(&o));
            let contents: Vec<(String, Vec<u8>)> =
                files(&out).into_iter().map(|f| (f.clone(), fs::read(out.join(&f)).unwrap())).collect();
            outputs.push(contents);
        }
        assert_eq!(outputs[0], outputs[1], "{cmd}");
        assert_eq!(outputs[0], outputs[2], "{cmd}");
    }
}

#[test]
fn bad_thread_count_exits_1() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), &affine(""));
    let o = run_env("forward", &cfg, tmp.path(), Some("zero"));
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("TRANSPORT_RECON_THREADS"));
}

#[test]
fn shipped_configs_parse() {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs");
    for name in ["affine", "log", "smooth_bump", "corollary"] {
        let cfg = transport_recon::config::ExperimentConfig::load(&dir.join(format!("{name}.toml"))).unwrap();
        cfg.resolve().unwrap();
    }
}
