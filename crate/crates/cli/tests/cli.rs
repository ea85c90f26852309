use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn kdiv(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_kdiv"))
        .args(args)
        .env("KDIV_THREADS", "1")
        .output()
        .expect("binary runs")
}

fn config(name: &str) -> String {
    let root = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs");
    root.join(name).to_string_lossy().into_owned()
}

fn write(dir: &Path, body: &str) -> String {
    let p = dir.join("scenario.toml");
    std::fs::write(&p, body).unwrap();
    p.to_string_lossy().into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

const SMALL_SEMIGROUP: &str = r#"
task = "monotonicity"
seed = 5
[generator]
preset = "semigroup"
rates = [0.4, 0.1, 0.3]
[grid]
t_max = 0.5
step = 0.05
[params]
k = 2
restarts = 4
[channels.phi1]
kind = "preset"
name = "identity"
[channels.phi2]
kind = "preset"
name = "dephasing"
p = 0.3
"#;

fn run_in(dir: &Path, sub: &str, cfg: &str, extra: &[&str]) -> (Output, PathBuf) {
    let out = dir.join(sub);
    let o = out.to_string_lossy().into_owned();
    let mut args = vec![sub, "--config", cfg, "--out-dir", &o];
    args.extend_from_slice(extra);
    (kdiv(&args), out)
}

#[test]
fn shipped_configs_validate() {
    for name in ["semigroup.toml", "eternal.toml", "amplitude_damping.toml"] {
        let o = kdiv(&["validate", "--config", &config(name)]);
        assert_eq!(o.status.code(), Some(0), "{name}: {}", stderr(&o));
        assert!(String::from_utf8_lossy(&o.stdout).starts_with("ok"));
    }
}

#[test]
fn validation_errors_exit_2_with_names() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), SMALL_SEMIGROUP);
    let o = kdiv(&["validate", "--config", &cfg, "--k", "3"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("exceeds the system dimension"), "{}", stderr(&o));
    let o = kdiv(&["validate", "--config", &cfg, "--restarts", "-2"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("restarts must be nonnegative"));
    let o = kdiv(&["validate", "--config", "/nonexistent/x.toml"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn malformed_matrix_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let body = SMALL_SEMIGROUP.replace(
        "kind = \"preset\"\nname = \"identity\"",
        "kind = \"kraus\"\ndims = [2, 2]\nmatrices = [[[[1.0, 0.0], [0.0]], [[0.0, 0.0], [1.0, 0.0]]]]",
    );
    let cfg = write(dir.path(), &body);
    let (o, out) = run_in(dir.path(), "discriminate", &cfg, &[]);
    assert_eq!(o.status.code(), Some(2), "{}", stderr(&o));
    assert!(!out.exists());
}

#[test]
fn semigroup_monotonicity_exits_0_and_writes_csv() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), SMALL_SEMIGROUP);
    let (o, out) = run_in(dir.path(), "monotonicity", &cfg, &[]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let csv = std::fs::read_to_string(out.join("trace.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("time,D,dD_dt,H_min,violation_flag"));
    assert_eq!(lines.count(), 11);
    assert!(!csv.contains('\r'));
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out.join("report.json")).unwrap()).unwrap();
    assert_eq!(report["resolved"]["restarts"], 4);
    assert_eq!(report["result"]["trace"]["violations"].as_array().unwrap().len(), 0);
}

#[test]
fn eternal_monotonicity_exits_4_with_violation() {
    let dir = tempfile::tempdir().unwrap();
    let (o, out) = run_in(dir.path(), "monotonicity", &config("eternal.toml"), &[]);
    assert_eq!(o.status.code(), Some(4), "{}", stderr(&o));
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out.join("report.json")).unwrap()).unwrap();
    let v = report["result"]["trace"]["violations"].as_array().unwrap();
    assert!(!v.is_empty());
    assert!(report["flags"]["certified_violation"].as_bool().unwrap());
}

#[test]
fn semigroup_tasks_exit_0() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), SMALL_SEMIGROUP);
    for sub in ["simulate", "divisibility", "discriminate", "hierarchy", "minentropy"] {
        let (o, _) = run_in(dir.path(), sub, &cfg, &[]);
        assert_eq!(o.status.code(), Some(0), "{sub}: {}", stderr(&o));
    }
    let csv = std::fs::read_to_string(dir.path().join("hierarchy/hierarchy.csv")).unwrap();
    assert!(csv.starts_with("k,D_k\n1,"));
    assert_eq!(csv.lines().count(), 3);
}

#[test]
fn singular_dynamics_halt_exits_3() {
    let dir = tempfile::tempdir().unwrap();
    let body = "task = \"divisibility\"\n[generator]\npreset = \"dephasing\"\ngamma = 60.0\n\
                [grid]\nt_max = 1.0\nstep = 0.01\n[params]\nk = 1\nrestarts = 2\n";
    let cfg = write(dir.path(), body);
    let (o, out) = run_in(dir.path(), "divisibility", &cfg, &[]);
    assert_eq!(o.status.code(), Some(3), "{}", stderr(&o));
    assert!(stderr(&o).contains("singular"));
    let report = std::fs::read_to_string(out.join("report.json")).unwrap();
    assert!(report.contains("\"halted\": {"));
}

#[test]
fn reports_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), SMALL_SEMIGROUP);
    let a = dir.path().join("a").to_string_lossy().into_owned();
    let b = dir.path().join("b").to_string_lossy().into_owned();
    assert_eq!(kdiv(&["hierarchy", "--config", &cfg, "--out-dir", &a]).status.code(), Some(0));
    let o = Command::new(env!("CARGO_BIN_EXE_kdiv"))
        .args(["hierarchy", "--config", &cfg, "--out-dir", &b, "--threads", "2"])
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(0));
    let ra = std::fs::read(Path::new(&a).join("report.json")).unwrap();
    let rb = std::fs::read(Path::new(&b).join("report.json")).unwrap();
    assert_eq!(ra, rb);
}

#[test]
fn flags_override_and_are_echoed() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), SMALL_SEMIGROUP);
    let (o, out) = run_in(
        dir.path(),
        "discriminate",
        &cfg,
        &["--seed", "11", "--k", "1", "--p", "0.25", "--restarts", "3", "--cold-start"],
    );
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let r: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out.join("report.json")).unwrap()).unwrap();
    let res = &r["resolved"];
    assert_eq!((res["seed"].as_u64(), res["k"].as_u64()), (Some(11), Some(1)));
    assert_eq!(res["p"].as_f64(), Some(0.25));
    assert_eq!(res["restarts"].as_u64(), Some(3));
    assert_eq!(res["cold_start"].as_bool(), Some(true));
    assert_eq!(r["scenario"]["task"], "discriminate");
}

#[test]
fn help_lists_defaults() {
    let o = kdiv(&["divisibility", "--help"]);
    let text = String::from_utf8_lossy(&o.stdout);
    for needle in ["--restarts", "default: 32", "KDIV_THREADS", "--cold-start", "--out-dir"] {
        assert!(text.contains(needle), "missing {needle}");
    }
}
