use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use tempfile::TempDir;

fn grz(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_grz"))
        .current_dir(dir)
        .env_remove("GRZ_SEED")
        .args(args)
        .output()
        .expect("binary runs")
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn manifest(path: &Path) -> serde_json::Value {
    serde_json::from_str(&fs::read_to_string(path.join("manifest.json")).unwrap()).unwrap()
}

#[test]
fn grazing_times_lists_the_roots() {
    let tmp = TempDir::new().unwrap();
    let o = grz(tmp.path(), &["grazing-times", "--omega", "0.115", "--mu", "0.3", "--t-max", "250", "-o", "out"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let csv = fs::read_to_string(tmp.path().join("out/grazing_times.csv")).unwrap();
    let roots: Vec<f64> = csv.lines().skip(1).map(|l| l.split(',').next().unwrap().parse().unwrap()).collect();
    for want in [17.7777, 40.6454, 72.4141, 95.2818, 127.0505, 181.6869, 236.3233] {
        assert!(roots.iter().any(|r| (r - want).abs() < 0.01), "{want} missing from {roots:?}");
    }
    let m = manifest(&tmp.path().join("out"));
    assert_eq!(m["status"], "ok");
    assert_eq!(m["config"]["omega"], 0.115);
    assert_eq!(m["config"]["eta"], 1500.0);
}

#[test]
fn simulate_shows_a_three_period_cycle() {
    let tmp = TempDir::new().unwrap();
    let args = [
        "simulate", "--omega", "0.115", "--mu", "0.3", "--v0", "0.3636", "--a0", "0.2089", "--c0", "0.2356", "--t-end",
        "500", "-o", "sim",
    ];
    let o = grz(tmp.path(), &args);
    assert!(o.status.success(), "{}", stderr(&o));
    let events = fs::read_to_string(tmp.path().join("sim/events.csv")).unwrap();
    let inceptions: Vec<f64> = events
        .lines()
        .filter(|l| l.contains("CrossMinusToPlus"))
        .map(|l| l.split(',').next().unwrap().parse().unwrap())
        .collect();
    let period = 2.0 * std::f64::consts::PI / 0.115;
    let late: Vec<&[f64]> = inceptions.windows(2).filter(|w| w[0] > 150.0).collect();
    assert!(!late.is_empty());
    for w in late {
        assert!(((w[1] - w[0]) / period - 3.0).abs() < 0.05, "cycle length {}", w[1] - w[0]);
    }
}

#[test]
fn config_file_layers_under_flags() {
    let tmp = TempDir::new().unwrap();
    fs::write(tmp.path().join("run.cfg"), "# override\nd = 0.24\nmu = 0.5\n").unwrap();
    let o = grz(tmp.path(), &["grazing-times", "-c", "run.cfg", "--mu", "0.4", "-o", "o"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let m = manifest(&tmp.path().join("o"));
    assert_eq!(m["config"]["d"], 0.24);
    assert_eq!(m["config"]["mu"], 0.4);
    assert_eq!(m["config"]["tau_V"], 15.0);
}

#[test]
fn empty_config_gives_defaults() {
    let tmp = TempDir::new().unwrap();
    fs::write(tmp.path().join("empty.cfg"), "").unwrap();
    let o = grz(tmp.path(), &["grazing-times", "--config", "empty.cfg", "-o", "o"]);
    assert!(o.status.success());
    let m = manifest(&tmp.path().join("o"));
    assert_eq!(m["config"]["eta"], 1500.0);
    assert_eq!(m["config"]["delta"], 0.4);
    assert_eq!(m["seed"], 42);
}

#[test]
fn config_errors_exit_2_and_name_the_key() {
    let tmp = TempDir::new().unwrap();
    fs::write(tmp.path().join("bad.cfg"), "d = 0.2\n\ntau_V = -1\n").unwrap();
    let o = grz(tmp.path(), &["classify", "-c", "bad.cfg"]);
    assert_eq!(o.status.code(), Some(2));
    let e = stderr(&o);
    assert!(e.contains("OutOfRange") && e.contains("tau_V") && e.contains("bad.cfg:3"), "{e}");

    fs::write(tmp.path().join("unknown.cfg"), "omega = 0.1\nomgea = 0.1\n").unwrap();
    let o = grz(tmp.path(), &["classify", "-c", "unknown.cfg"]);
    assert_eq!(o.status.code(), Some(2));
    let e = stderr(&o);
    assert!(e.contains("UnknownKey") && e.contains("omgea") && e.contains("unknown.cfg:2"), "{e}");

    let o = grz(tmp.path(), &["simulate", "--t0", "10", "--t-end", "5"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("t_end"));

    let o = grz(tmp.path(), &["simulate", "--graze-policy", "sideways"]);
    assert_eq!(o.status.code(), Some(2));

    let o = grz(tmp.path(), &["no-such-command"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(!stderr(&o).contains("panicked"));
}

#[test]
fn model_errors_exit_1_and_are_recorded() {
    let tmp = TempDir::new().unwrap();
    // No graze inside this V bracket.
    let o = grz(tmp.path(), &["grazing-ic", "--v-lo", "2.0", "--v-hi", "2.1", "-o", "fail"]);
    assert_eq!(o.status.code(), Some(1));
    let e = stderr(&o);
    assert!(!e.contains("panicked"), "{e}");
    let m = manifest(&tmp.path().join("fail"));
    assert_eq!(m["status"], "error");
    assert!(m["error_kind"].as_str().is_some_and(|k| !k.is_empty()));
    assert!(e.contains(m["error_kind"].as_str().unwrap()));
}

fn small_sweep(dir: &Path, out: &str, extra: &[&str]) -> Output {
    let mut args = vec![
        "sweep",
        "--param",
        "omega",
        "--from",
        "0.11",
        "--to",
        "0.118",
        "--step",
        "0.002",
        "--mu",
        "0.3",
        "--samples",
        "4",
        "-o",
        out,
    ];
    args.extend_from_slice(extra);
    grz(dir, &args)
}

#[test]
fn sweep_is_independent_of_worker_count() {
    let tmp = TempDir::new().unwrap();
    assert!(small_sweep(tmp.path(), "w1", &["--workers", "1", "--seed", "5"]).status.success());
    assert!(small_sweep(tmp.path(), "w3", &["--workers", "3", "--seed", "5"]).status.success());
    for f in ["sweep.csv", "edges.csv", "sweep.json"] {
        assert_eq!(
            fs::read(tmp.path().join("w1").join(f)).unwrap(),
            fs::read(tmp.path().join("w3").join(f)).unwrap(),
            "{f}"
        );
    }
    let csv = fs::read_to_string(tmp.path().join("w1/sweep.csv")).unwrap();
    assert!(csv.starts_with("param,ic_index,class_m,class_n,grazing_margin,f_extrema\n"));
    assert!(csv.ends_with('\n'));
}

#[test]
fn manifest_round_trip_reproduces_outputs() {
    let tmp = TempDir::new().unwrap();
    assert!(small_sweep(tmp.path(), "first", &["--seed", "11", "--d", "0.28"]).status.success());
    let o = grz(tmp.path(), &["sweep", "--config", "first/manifest.json", "-o", "second"]);
    assert!(o.status.success(), "{}", stderr(&o));
    for f in ["sweep.csv", "edges.csv", "sweep.json", "manifest.json"] {
        assert_eq!(
            fs::read(tmp.path().join("first").join(f)).unwrap(),
            fs::read(tmp.path().join("second").join(f)).unwrap(),
            "{f}"
        );
    }
    // A manifest belongs to its own subcommand.
    let o = grz(tmp.path(), &["classify", "--config", "first/manifest.json", "-o", "x"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn seed_comes_from_the_environment_as_a_fallback() {
    let tmp = TempDir::new().unwrap();
    let run = |seed_env: Option<&str>, extra: &[&str], out: &str| {
        let mut cmd = Command::new(env!("CARGO_BIN_EXE_grz"));
        cmd.current_dir(tmp.path()).env_remove("GRZ_SEED");
        if let Some(s) = seed_env {
            cmd.env("GRZ_SEED", s);
        }
        let mut args = vec!["grazing-times", "-o", out];
        args.extend_from_slice(extra);
        assert!(cmd.args(&args).output().unwrap().status.success());
        manifest(&tmp.path().join(out))["seed"].as_u64().unwrap()
    };
    assert_eq!(run(Some("17"), &[], "a"), 17);
    assert_eq!(run(Some("17"), &["--seed", "3"], "b"), 3);
    assert_eq!(run(None, &[], "c"), 42);
}

#[test]
fn help_lists_flags_and_output_schema() {
    let tmp = TempDir::new().unwrap();
    let o = grz(tmp.path(), &["doa", "--help"]);
    assert!(o.status.success());
    let text = String::from_utf8_lossy(&o.stdout);
    for needle in
        ["--v-lo", "--phase-resolve", "--tau-v", "--workers", "--seed", "V,C,class_m,class_n,phase", "manifest.json"]
    {
        assert!(text.contains(needle), "missing {needle} in\n{text}");
    }
    let o = grz(tmp.path(), &["--help"]);
    let text = String::from_utf8_lossy(&o.stdout);
    for sub in [
        "simulate",
        "simulate-smoothed",
        "ramp",
        "classify",
        "orbit",
        "probe-sqrt",
        "grazing-times",
        "grazing-ic",
        "leaf",
        "sweep",
        "tongue",
        "doa",
        "grazing-curve",
        "quasi",
    ] {
        assert!(text.contains(sub), "{sub}");
    }
}

#[test]
fn scans_write_documented_headers() {
    let tmp = TempDir::new().unwrap();
    let o = grz(tmp.path(), &["doa", "--v-n", "4", "--c-n", "3", "-o", "doa"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let doa = fs::read_to_string(tmp.path().join("doa/doa.csv")).unwrap();
    assert!(doa.starts_with("V,C,class_m,class_n,phase\n"));
    assert_eq!(doa.lines().count(), 1 + 12);

    let o = grz(tmp.path(), &["tongue", "--omega-n", "3", "--mu-n", "2", "--samples", "1", "-o", "tongue"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let tongue = fs::read_to_string(tmp.path().join("tongue/tongue.csv")).unwrap();
    assert!(tongue.starts_with("omega,mu,classes\n"));
    assert_eq!(tongue.lines().count(), 1 + 6);

    let o = grz(tmp.path(), &["grazing-curve", "--n", "3", "--mu-from", "0.3", "--mu-to", "0.4", "-o", "gc"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let gc = fs::read_to_string(tmp.path().join("gc/grazing_curve.csv")).unwrap();
    assert!(gc.starts_with("mu,omega_g,residual\n"));
    let first: f64 = gc.lines().nth(1).unwrap().split(',').nth(1).unwrap().parse().unwrap();
    assert!((first - 0.1135).abs() < 2e-3, "{first}");
}
