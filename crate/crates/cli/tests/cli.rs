use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use msp_core::exact::{brute_force_opt, check_lp, BruteForceConfig};
use msp_core::io::{instance_to_json, schedule_from_json, schedule_to_json};
use msp_core::model::{Activity, ActivityId, DepotConfig, DroneSpec, Point3, ProblemInstance};
use msp_core::schedule::ratio_to_f64;
use msp_core::workloads::gen_tiny;

fn msp(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_msp")).current_dir(dir).args(args).output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

/// Value of `key=` on the first stdout line starting with `prefix`.
fn field(o: &Output, prefix: &str, key: &str) -> String {
    let out = stdout(o);
    let line = out.lines().find(|l| l.starts_with(prefix)).unwrap_or_else(|| panic!("no `{prefix}` line in {out}"));
    let pat = format!("{key}=");
    line.split_whitespace().find_map(|t| t.strip_prefix(&pat)).unwrap_or_else(|| panic!("no {key} in {line}")).to_string()
}

fn write_instance(dir: &Path, name: &str, inst: &ProblemInstance) -> PathBuf {
    let p = dir.join(name);
    fs::write(&p, instance_to_json(inst).unwrap()).unwrap();
    p
}

#[test]
fn generate_is_reproducible_and_sized() {
    let d = tempfile::tempdir().unwrap();
    for out in ["a.json", "b.json"] {
        let o = msp(d.path(), &["generate", "--workload", "rnd", "--drones", "5", "--load", "2", "--seed", "9", "--out", out]);
        assert!(o.status.success());
    }
    let a = fs::read(d.path().join("a.json")).unwrap();
    assert_eq!(a, fs::read(d.path().join("b.json")).unwrap());
    let inst = msp_core::io::instance_from_json(std::str::from_utf8(&a).unwrap()).unwrap();
    assert_eq!(inst.activities.len(), 10);
}

#[test]
fn dfs_needs_a_graph() {
    let d = tempfile::tempdir().unwrap();
    let o = msp(d.path(), &["generate", "--workload", "dfs", "--drones", "2", "--load", "2", "--out", "x.json"]);
    assert_eq!(o.status.code(), Some(2));
    let o = msp(d.path(), &["roadgraph", "--vertices", "40", "--out", "g.json"]);
    assert!(o.status.success());
    let o = msp(d.path(), &["generate", "--workload", "dfs", "--drones", "2", "--load", "2", "--graph", "g.json", "--out", "x.json"]);
    assert!(o.status.success(), "{}", stdout(&o));
    // too few vertices for the requested activities
    let o = msp(d.path(), &["roadgraph", "--vertices", "3", "--out", "small.json"]);
    assert!(o.status.success());
    let o = msp(d.path(), &["generate", "--workload", "dfs", "--drones", "5", "--load", "8", "--graph", "small.json", "--out", "y.json"]);
    assert_eq!(o.status.code(), Some(3));
}

#[test]
fn opt_matches_the_exact_solver() {
    let d = tempfile::tempdir().unwrap();
    let inst = (0..).map(gen_tiny).find(|i| i.activities.len() == 3).unwrap();
    write_instance(d.path(), "toy.json", &inst);
    let o = msp(d.path(), &["schedule", "--instance", "toy.json", "--algo", "opt", "--out", "s.json"]);
    assert!(o.status.success(), "{}", stdout(&o));
    let expect = ratio_to_f64(&brute_force_opt(&inst, &BruteForceConfig::default()).unwrap().utility);
    let got: f64 = field(&o, "metrics", "utility").parse().unwrap();
    assert_eq!(got, expect);
}

#[test]
fn opt_over_caps_is_refused() {
    let d = tempfile::tempdir().unwrap();
    let o = msp(d.path(), &["generate", "--workload", "rnd", "--drones", "5", "--load", "2", "--out", "i.json"]);
    assert!(o.status.success());
    let o = msp(d.path(), &["schedule", "--instance", "i.json", "--algo", "opt"]);
    assert_eq!(o.status.code(), Some(3));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("cap of 6"), "{err}");
    let o = msp(d.path(), &["schedule", "--instance", "i.json", "--algo", "opt", "--opt-caps", "6,2"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn milp_export_writes_a_checked_model() {
    let d = tempfile::tempdir().unwrap();
    write_instance(d.path(), "toy.json", &gen_tiny(1));
    let o = msp(d.path(), &["schedule", "--instance", "toy.json", "--algo", "milp-export", "--out", "m.lp"]);
    assert!(o.status.success(), "{}", stdout(&o));
    let lp = fs::read_to_string(d.path().join("m.lp")).unwrap();
    let summary = check_lp(&lp).unwrap();
    assert_eq!(summary.rows.len().to_string(), field(&o, "milp", "constraints"));
    let o = msp(d.path(), &["schedule", "--instance", "toy.json", "--algo", "milp-export"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn evaluate_reports_and_catches_tampering() {
    let d = tempfile::tempdir().unwrap();
    let o = msp(d.path(), &["generate", "--workload", "rnd", "--drones", "3", "--load", "4", "--seed", "2", "--out", "i.json"]);
    assert!(o.status.success());
    let o = msp(d.path(), &["schedule", "--instance", "i.json", "--algo", "vrc", "--out", "s.json"]);
    assert!(o.status.success());
    let o = msp(d.path(), &["evaluate", "--instance", "i.json", "--schedule", "s.json", "--out", "r.csv", "--json", "r.json"]);
    assert!(o.status.success(), "{}", stdout(&o));
    let total: f64 = field(&o, "valid", "utility").parse().unwrap();
    let per: f64 = field(&o, "valid", "utility_per_drone").parse().unwrap();
    assert_eq!(per, total / 3.0);
    let csv = fs::read_to_string(d.path().join("r.csv")).unwrap();
    assert!(csv.starts_with("activity_id,u,u_bar,u_bbar,U\n"));
    assert_eq!(csv.lines().count(), 13);
    let json: serde_json::Value = serde_json::from_str(&fs::read_to_string(d.path().join("r.json")).unwrap()).unwrap();
    assert!(json["trips"].as_array().is_some_and(|t| !t.is_empty()));

    // move a slot before its trip takes off
    let mut sched = schedule_from_json(&fs::read_to_string(d.path().join("s.json")).unwrap()).unwrap();
    let drone = sched.drones.iter_mut().find(|m| !m.slots.is_empty()).unwrap();
    let takeoff = drone.trips[0].takeoff;
    let slot = &mut drone.slots[0];
    let len = slot.end - slot.start;
    slot.start = takeoff.saturating_sub(1000);
    slot.end = slot.start + len;
    fs::write(d.path().join("bad.json"), schedule_to_json(&sched).unwrap()).unwrap();
    let o = msp(d.path(), &["evaluate", "--instance", "i.json", "--schedule", "bad.json"]);
    assert_eq!(o.status.code(), Some(4));
    assert!(stdout(&o).lines().any(|l| l.starts_with("violation")));
}

#[test]
fn experiment_repeat_one_has_zero_spread() {
    let d = tempfile::tempdir().unwrap();
    let o = Command::new(env!("CARGO_BIN_EXE_msp"))
        .current_dir(d.path())
        .env("MSP_THREADS", "2")
        .args(["experiment", "--suite", "dfs", "--drones", "2,3", "--loads", "2", "--repeats", "1", "--out", "exp"])
        .output()
        .unwrap();
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = fs::read_to_string(d.path().join("exp/experiment-dfs.csv")).unwrap();
    let mut lines = text.lines();
    let header: Vec<&str> = lines.next().unwrap().split(',').collect();
    let rows: Vec<Vec<&str>> = lines.map(|l| l.split(',').collect()).collect();
    // two cells, jsc and vrc each; tiny cells also get the exact solver
    assert!(rows.len() >= 4);
    for r in &rows {
        assert_eq!(r[0], "msp-experiment/1");
        for (h, v) in header.iter().zip(r) {
            if h.ends_with("_std") && *h != "runtime_ms_std" {
                assert_eq!(v.parse::<f64>().unwrap(), 0.0);
            }
        }
    }

    // same seed, same results apart from timings
    let again = Command::new(env!("CARGO_BIN_EXE_msp"))
        .current_dir(d.path())
        .args(["experiment", "--suite", "dfs", "--drones", "2,3", "--loads", "2", "--repeats", "1", "--out", "exp2"])
        .output()
        .unwrap();
    assert!(again.status.success());
    let strip = |p: &str| -> Vec<String> {
        let t = fs::read_to_string(d.path().join(p)).unwrap();
        t.lines().map(|l| l.rsplitn(2, ',').nth(1).unwrap().to_string()).collect()
    };
    assert_eq!(strip("exp/experiment-dfs-runs.csv"), strip("exp2/experiment-dfs-runs.csv"));

    let bad = Command::new(env!("CARGO_BIN_EXE_msp"))
        .current_dir(d.path())
        .env("MSP_THREADS", "lots")
        .args(["experiment", "--suite", "rnd", "--drones", "2", "--loads", "2", "--repeats", "1", "--out", "exp3"])
        .output()
        .unwrap();
    assert_eq!(bad.status.code(), Some(2));
}

fn tight_instance() -> ProblemInstance {
    // 2 × 800 s of flight and a 60 s capture use 92% of the battery
    ProblemInstance {
        depot: DepotConfig { location: Point3::ORIGIN, mission_horizon: 3600, max_trips_per_drone: 1 },
        fleet: DroneSpec::reference(1),
        beta: 60,
        activities: vec![Activity {
            id: ActivityId(1),
            waypoint: Point3::new(3200.0, 0.0, 0.0),
            start: 900,
            end: 960,
            kappa: 5 * DroneSpec::reference(1).proc_speed,
            deadline: 1200,
            gamma_capture: 3,
            gamma_onboard: 2,
            gamma_ontime: 1,
        }],
    }
}

#[test]
fn emulate_identity_and_inflation() {
    let d = tempfile::tempdir().unwrap();
    write_instance(d.path(), "t.json", &tight_instance());
    let o = msp(d.path(), &["schedule", "--instance", "t.json", "--algo", "jsc", "--out", "s.json"]);
    assert!(o.status.success());
    assert_eq!(field(&o, "metrics", "trips"), "1");
    let o = msp(d.path(), &["emulate", "--instance", "t.json", "--schedule", "s.json", "--noise", "0", "--repeats", "3", "--out", "e.csv"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(field(&o, "emulation", "incomplete_pct_mean"), "0.000");
    let csv = fs::read_to_string(d.path().join("e.csv")).unwrap();
    assert_eq!(csv.lines().count(), 4);
    let o = msp(d.path(), &["emulate", "--instance", "t.json", "--schedule", "s.json", "--noise", "0", "--inflation", "1.2"]);
    assert!(o.status.success());
    assert_eq!(field(&o, "emulation", "incomplete_pct_mean"), "100.000");

    // an explicit trace with a headwind on the way out
    fs::write(d.path().join("trace.csv"), "trip_id,leg_index,fly_factor,hover_factor,compute_factor\n0,0,1.2,1,1\n").unwrap();
    let o = msp(d.path(), &["emulate", "--instance", "t.json", "--schedule", "s.json", "--trace", "trace.csv"]);
    assert!(o.status.success());
    let max: f64 = field(&o, "emulation", "max_deficit").parse().unwrap();
    // (800·750·2.2 + 60·700 + compute) / E − 1
    assert!(max > 0.0 && max < 0.02, "{max}");
    fs::write(d.path().join("bad.csv"), "trip_id,leg_index,fly_factor,hover_factor,compute_factor\n3,0,1,1,1\n").unwrap();
    let o = msp(d.path(), &["emulate", "--instance", "t.json", "--schedule", "s.json", "--trace", "bad.csv"]);
    assert_eq!(o.status.code(), Some(2));
}
