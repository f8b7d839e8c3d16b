use std::path::Path;
use std::process::{Command, Output};

const VM: &str = r#"{"family":"von_mises","mu":0,"kappa":1}"#;

fn run(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_torusdiff"))
        .current_dir(dir)
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn simulate(dir: &Path, file: &str, seed: &str) {
    let o = run(
        dir,
        &["simulate", "--density", VM, "--sigma", "0.16", "--n", "150", "--delta", "0.5", "--seed", seed, "--out", file],
    );
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn simulate_is_seeded_and_round_trips() {
    let dir = tempfile::tempdir().unwrap();
    simulate(dir.path(), "a.csv", "5");
    simulate(dir.path(), "b.csv", "5");
    let a = std::fs::read_to_string(dir.path().join("a.csv")).unwrap();
    let b = std::fs::read_to_string(dir.path().join("b.csv")).unwrap();
    assert_eq!(a, b);
    assert!(a.starts_with("t,theta1\n0,"));
    assert_eq!(a.lines().count(), 152);
    let p = torus_diffusion::io::read_path_file(&dir.path().join("a.csv")).unwrap();
    assert_eq!(torus_diffusion::io::path_to_string(&p).unwrap(), a);
}

#[test]
fn toroidal_simulation_has_two_columns() {
    let dir = tempfile::tempdir().unwrap();
    let density = r#"{"family":"bvm","mu1":0,"mu2":1,"kappa1":1,"kappa2":2,"lambda":0.5}"#;
    let o = run(
        dir.path(),
        &["simulate", "--density", density, "--cov", "0.04,0.01,0.01,0.09", "--n", "5", "--delta", "0.5"],
    );
    assert!(o.status.success());
    let text = stdout(&o);
    assert!(text.starts_with("t,theta1,theta2\n"));
    assert_eq!(text.lines().count(), 7);
}

#[test]
fn density_may_come_from_a_file() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("d.json"), VM).unwrap();
    let inline = run(dir.path(), &["tpd", "--density", VM, "--sigma", "0.2", "--from", "0", "--to", "1", "--t", "0.3"]);
    let file = run(dir.path(), &["tpd", "--density", "d.json", "--sigma", "0.2", "--from", "0", "--to", "1", "--t", "0.3"]);
    assert!(inline.status.success());
    assert_eq!(stdout(&inline), stdout(&file));
    let v: serde_json::Value = serde_json::from_str(&stdout(&inline)).unwrap();
    assert!(v["density"].as_f64().unwrap() > 0.0);
}

#[test]
fn fit_and_test_report_json() {
    let dir = tempfile::tempdir().unwrap();
    simulate(dir.path(), "a.csv", "1");
    let o = run(dir.path(), &["fit", "a.csv"]);
    assert!(o.status.success());
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(v["names"][2], "sigma");
    assert!(v["loglik"].as_f64().unwrap().is_finite());

    let o = run(dir.path(), &["test", "a.csv", "--null", "mu=0,kappa=1", "--format", "csv"]);
    assert!(o.status.success());
    let text = stdout(&o);
    let row: Vec<&str> = text.lines().nth(1).unwrap().split(',').collect();
    assert_eq!(row[1], "2");
    let p: f64 = row[2].parse().unwrap();
    assert!((0.0..=1.0).contains(&p));
}

#[test]
fn ktest_reads_a_manifest() {
    let dir = tempfile::tempdir().unwrap();
    simulate(dir.path(), "a.csv", "1");
    simulate(dir.path(), "b.csv", "2");
    std::fs::write(
        dir.path().join("g.json"),
        r#"{"groups":[{"label":"x","paths":["a.csv"]},{"label":"y","paths":["b.csv"]}]}"#,
    )
    .unwrap();
    let o = run(dir.path(), &["ktest", "--groups", "g.json", "--preset", "diffusions"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(v["df"], 3);

    // common volatility: a = (mu1, kappa1, sigma, mu2, kappa2)
    let m = "1,0,0,0,0\n0,1,0,0,0\n0,0,1,0,0\n0,0,0,1,0\n0,0,0,0,1\n0,0,1,0,0\n";
    std::fs::write(dir.path().join("m.csv"), m).unwrap();
    let o = run(dir.path(), &["ktest", "--groups", "g.json", "--matrix", "m.csv"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(v["df"], 1);
}

#[test]
fn bridge_writes_sidecar() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(
        dir.path(),
        &[
            "bridge", "--density", VM, "--sigma", "0.2", "--from", "0", "--to", "2", "--horizon", "1", "--n", "4",
            "--draws", "3", "--seed", "9", "--out", "b.csv",
        ],
    );
    assert!(o.status.success());
    let csv = std::fs::read_to_string(dir.path().join("b.csv")).unwrap();
    assert!(csv.starts_with("draw,t,theta1\n"));
    assert_eq!(csv.lines().count(), 1 + 3 * 6);
    let side: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("b.json")).unwrap()).unwrap();
    assert_eq!(side["seed"], 9);
    assert_eq!(side["windings"].as_array().unwrap().len(), 3);
}

#[test]
fn jump_simulates_and_bridges() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(dir.path(), &["jump", "--density", VM, "--sigma", "0.3", "--n", "10", "--delta", "0.5"]);
    assert!(o.status.success());
    assert_eq!(stdout(&o).lines().count(), 12);
    let o = run(
        dir.path(),
        &["jump", "--density", VM, "--sigma", "0.3", "--n", "4", "--end", "2", "--horizon", "1", "--format", "json"],
    );
    assert!(o.status.success());
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(v["draws"][0]["t"].as_array().unwrap().len(), 6);
}

#[test]
fn ingest_rejection_exits_three() {
    let dir = tempfile::tempdir().unwrap();
    let mut s = String::from("id,t,x,y\n");
    for i in 0..40 {
        let a = i as f64 * 0.3;
        s.push_str(&format!("good,{},{},{}\n", i as f64 * 0.5, a.cos(), a.sin()));
    }
    for i in 0..40 {
        let x = if i % 4 == 0 { "NA".to_string() } else { "1".to_string() };
        s.push_str(&format!("bad,{},{x},{}\n", i as f64 * 0.5, 0.1 * i as f64));
    }
    std::fs::write(dir.path().join("tracks.csv"), s).unwrap();
    let o = run(dir.path(), &["ingest", "tracks.csv", "--paths-dir", "paths"]);
    assert_eq!(o.status.code(), Some(3));
    assert!(dir.path().join("paths/good.csv").exists());
    assert!(!dir.path().join("paths/bad.csv").exists());
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(v["tracks"][1]["status"]["status"], "rejected");
}

#[test]
fn experiment_runs_from_config() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(
        dir.path().join("e.json"),
        r#"{"experiment":"rejection_rates","density":{"family":"von_mises","mu":0,"kappa":1},"replicates":8,"n":80,"delta":0.5,"seed":2}"#,
    )
    .unwrap();
    let o = run(dir.path(), &["experiment", "e.json", "--format", "csv", "--samples", "s.csv"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(stdout(&o).starts_with("alpha,rate,se"));
    let samples = std::fs::read_to_string(dir.path().join("s.csv")).unwrap();
    assert_eq!(samples.lines().count(), 9);
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(run(dir.path(), &["frobnicate"]).status.code(), Some(1));
    assert_eq!(run(dir.path(), &["--help"]).status.code(), Some(0));
    assert_eq!(run(dir.path(), &["fit", "missing.csv"]).status.code(), Some(1));
    let bad = r#"{"family":"von_mises","mu":0,"kappa":1,"alpha":0.5}"#;
    let o = run(dir.path(), &["tpd", "--density", bad, "--sigma", "1", "--from", "0", "--to", "0", "--t", "1"]);
    assert_eq!(o.status.code(), Some(1));
    // a path that never moves has no finite maximum likelihood estimate
    std::fs::write(dir.path().join("flat.csv"), "t,theta1\n0,1\n1,1\n2,1\n3,1\n").unwrap();
    assert_eq!(run(dir.path(), &["fit", "flat.csv"]).status.code(), Some(2));
}
