use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn detpac(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_detpac"))
        .args(args)
        .env("DETPAC_THREADS", "1")
        .output()
        .expect("binary runs")
}

fn ok(args: &[&str]) -> String {
    let out = detpac(args);
    assert!(out.status.success(), "{args:?} failed: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

fn path(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn arc_count(instance: &Value) -> usize {
    instance["stages"]
        .as_array()
        .unwrap()
        .iter()
        .flat_map(|s| s["states"].as_array().unwrap())
        .map(|s| s["actions"].as_array().unwrap().len())
        .sum()
}

#[test]
fn gen_hard_instance_census() {
    let v: Value = serde_json::from_str(&ok(&["gen", "--kind", "hard", "--S", "8", "--A", "3", "--H", "9"])).unwrap();
    assert_eq!(v["horizon"], 9);
    assert_eq!(arc_count(&v), 95);
    let v: Value = serde_json::from_str(&ok(&["gen", "--kind", "hard", "--S", "8", "--A", "2", "--H", "9"])).unwrap();
    assert_eq!(arc_count(&v), 71);
}

#[test]
fn flow_on_cover_elimination_instance() {
    let dir = tempfile::tempdir().unwrap();
    for m in [2usize, 3, 5] {
        let inst = dir.path().join(format!("c{m}.json"));
        let demand = dir.path().join(format!("d{m}.json"));
        let ms = m.to_string();
        ok(&["gen", "--kind", "cover-elim", "--m", &ms, "--demand-out", path(&demand), "--out", path(&inst)]);
        let v: Value = serde_json::from_str(&ok(&["flow", "--instance", path(&inst), "--demand", path(&demand)])).unwrap();
        assert_eq!(v["phi_star"].as_f64(), Some((m + 1) as f64));
        assert_eq!(v["cover"].as_array().unwrap().len(), m + 1);

        let inst = dir.path().join(format!("n{m}.json"));
        ok(&["gen", "--kind", "cover-elim", "--m", &ms, "--without-bar-arc", "--out", path(&inst)]);
        let v: Value = serde_json::from_str(&ok(&["flow", "--instance", path(&inst)])).unwrap();
        assert_eq!(v["phi_star"].as_f64(), Some((2 * m) as f64));
    }
}

#[test]
fn bench_rejects_zero_trials() {
    let dir = tempfile::tempdir().unwrap();
    let inst = dir.path().join("b.json");
    ok(&["gen", "--kind", "bandit", "--means", "0.7,0.3", "--out", path(&inst)]);
    let out = detpac(&["bench", "--instance", path(&inst), "--trials", "0"]);
    assert!(!out.status.success());
    let err: Value = serde_json::from_slice(out.stderr.trim_ascii()).unwrap();
    assert_eq!(err["error"], "invalid_config");
}

#[test]
fn malformed_instance_is_reported() {
    let dir = tempfile::tempdir().unwrap();
    let inst = dir.path().join("bad.json");
    std::fs::write(&inst, r#"{"horizon": 1, "stages": [], "reward_kind": "bernoulli"}"#).unwrap();
    let out = detpac(&["gaps", "--instance", path(&inst)]);
    assert!(!out.status.success());
    let err: Value = serde_json::from_slice(out.stderr.trim_ascii()).unwrap();
    assert!(err["message"].as_str().is_some());
}

#[test]
fn bench_csv_is_byte_stable() {
    let dir = tempfile::tempdir().unwrap();
    let inst = dir.path().join("r.json");
    ok(&["gen", "--kind", "random-layered", "--S", "2", "--A", "2", "--H", "3", "--seed", "4", "--out", path(&inst)]);
    let run = |threads: &str, csv: &Path| {
        let out = Command::new(env!("CARGO_BIN_EXE_detpac"))
            .args(["bench", "--instance", path(&inst), "--rule", "adaptive-max-coverage", "--eps", "0.2"])
            .args(["--trials", "12", "--seed", "99", "--out", path(csv)])
            .env("DETPAC_THREADS", threads)
            .output()
            .unwrap();
        assert!(out.status.success());
        std::fs::read(csv).unwrap()
    };
    let a = run("1", &dir.path().join("a.csv"));
    let b = run("3", &dir.path().join("b.csv"));
    assert_eq!(a, b);
    let text = String::from_utf8(a).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("# detpac-batch v1"));
    assert_eq!(lines.next(), Some("seed,rule,eps,delta,tau,stop_rule,subopt,good_event"));
    assert_eq!(lines.count(), 12);
}

#[test]
fn run_and_lb_emit_json() {
    let dir = tempfile::tempdir().unwrap();
    let inst = dir.path().join("t.json");
    ok(&["gen", "--kind", "random-tree", "--branching", "2", "--H", "3", "--seed", "1", "--out", path(&inst)]);
    let run: Value = serde_json::from_str(&ok(&["run", "--instance", path(&inst), "--eps", "0.3", "--seed", "2"])).unwrap();
    assert!(run["tau"].as_u64().unwrap() > 0);
    let first = &run["periods"][0];
    for key in ["k", "t_start", "d_k", "N_k", "phi_star", "cover_size"] {
        assert!(first.get(key).is_some(), "missing {key}");
    }
    let lb: Value = serde_json::from_str(&ok(&["lb", "--instance", path(&inst), "--eps", "0.1", "--delta", "0.1"])).unwrap();
    assert_eq!(lb["sandwich_holds"], true);
    assert!(lb["tree_bound"].as_f64().is_some());
}
