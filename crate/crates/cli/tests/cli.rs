//! End-to-end checks of the command-line surface: exit codes, file outputs,
//! determinism, and the advice formats.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_dispatch-lab"))
}

fn fixtures() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../fixtures")
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn run_graph(out_dir: &Path) -> Output {
    bin()
        .args(["--out-dir", out_dir.to_str().unwrap(), "graph"])
        .args(["--nodes", fixtures().join("tianhe_sample/nodes.csv").to_str().unwrap()])
        .args(["--edges", fixtures().join("tianhe_sample/edges.csv").to_str().unwrap()])
        .output()
        .unwrap()
}

#[test]
fn graph_summary_counts_fixture_kinds() {
    let dir = tempfile::tempdir().unwrap();
    let out = run_graph(dir.path());
    assert!(out.status.success(), "{}", stderr(&out));
    let text = stdout(&out);
    assert!(text.contains("10 restaurants"), "{text}");
    assert!(text.contains("10 destinations"), "{text}");
    assert!(dir.path().join("apsp.bin").exists());
}

#[test]
fn graph_rebuild_is_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    assert!(run_graph(dir.path()).status.success());
    let first = fs::read(dir.path().join("apsp.bin")).unwrap();
    assert!(run_graph(dir.path()).status.success());
    assert_eq!(first, fs::read(dir.path().join("apsp.bin")).unwrap());
}

#[test]
fn graph_unknown_vertex_names_the_id() {
    let dir = tempfile::tempdir().unwrap();
    let nodes = dir.path().join("nodes.csv");
    let edges = dir.path().join("edges.csv");
    fs::write(&nodes, "id,kind,name,weight_attr\n0,restaurant,r,1\n1,destination,d,1\n").unwrap();
    fs::write(&edges, "u,v,length_m\n0,7,100\n").unwrap();
    let out = bin()
        .args(["--out-dir", dir.path().to_str().unwrap(), "graph"])
        .args(["--nodes", nodes.to_str().unwrap()])
        .args(["--edges", edges.to_str().unwrap()])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(3));
    assert!(stderr(&out).contains('7'), "{}", stderr(&out));
}

fn run_simulate(dir: &Path, extra: &[&str]) -> Output {
    let mut cmd = bin();
    cmd.args(["--out-dir", dir.to_str().unwrap(), "simulate"])
        .args(["--nodes", fixtures().join("tianhe_sample/nodes.csv").to_str().unwrap()])
        .args(["--edges", fixtures().join("tianhe_sample/edges.csv").to_str().unwrap()])
        .args(["--survey", fixtures().join("survey.json").to_str().unwrap()]);
    cmd.args(extra);
    cmd.output().unwrap()
}

#[test]
fn simulate_is_deterministic_per_seed() {
    let dir = tempfile::tempdir().unwrap();
    let args = [
        "--deliverymen",
        "50",
        "--orders",
        "120",
        "--proportion",
        "0.4",
        "--seed",
        "7",
    ];
    let out = run_simulate(dir.path(), &args);
    assert!(out.status.success(), "{}", stderr(&out));
    let first = fs::read(dir.path().join("records.csv")).unwrap();
    assert!(run_simulate(dir.path(), &args).status.success());
    assert_eq!(first, fs::read(dir.path().join("records.csv")).unwrap());
    // a different seed must change the content
    let mut other = args;
    other[7] = "8";
    assert!(run_simulate(dir.path(), &other).status.success());
    assert_ne!(first, fs::read(dir.path().join("records.csv")).unwrap());
}

#[test]
fn simulate_sweep_writes_one_meta_block_per_scenario() {
    let dir = tempfile::tempdir().unwrap();
    let sweep = dir.path().join("sweep.json");
    fs::write(
        &sweep,
        r#"{
  "master_seed": 3,
  "base": { "order_count": 60, "courier_count": 40, "proportion": 0.3, "avg_tip": 10.0 },
  "courier_count": [20, 40, 60],
  "replicates": 1
}"#,
    )
    .unwrap();
    let out = run_simulate(dir.path(), &["--sweep", sweep.to_str().unwrap()]);
    assert!(out.status.success(), "{}", stderr(&out));
    let meta: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("records.meta.json")).unwrap())
            .unwrap();
    let scenarios = meta["scenarios"].as_array().unwrap();
    assert_eq!(scenarios.len(), 3);
    for s in scenarios {
        assert!(s["config_hash"].as_str().unwrap().len() == 16);
        assert_eq!(s["record_count"].as_u64(), Some(60));
    }
    let records = fs::read_to_string(dir.path().join("records.csv")).unwrap();
    assert_eq!(records.lines().count(), 1 + 180); // header + 3 x 60
}

#[test]
fn simulate_trace_flag_emits_event_log() {
    let dir = tempfile::tempdir().unwrap();
    let out = run_simulate(
        dir.path(),
        &["--deliverymen", "20", "--orders", "40", "--seed", "2", "--trace"],
    );
    assert!(out.status.success(), "{}", stderr(&out));
    let trace = fs::read_to_string(dir.path().join("trace_000.csv")).unwrap();
    assert!(trace.starts_with("time,courier_id,order_id,kind,vertex"));
    assert!(trace.contains("pickup"), "trace has pickups");
    assert!(trace.contains("dropoff"), "trace has dropoffs");
}

#[test]
fn simulate_rejects_bad_tick() {
    let dir = tempfile::tempdir().unwrap();
    let out = run_simulate(dir.path(), &["--tick", "0"]);
    assert_eq!(out.status.code(), Some(3));
}

/// Records carrying an exact linear plant: deliverable rows follow the
/// planted coefficients; a separable block of never-delivered rows keeps
/// the logistic filter trainable.
fn write_planted_records(path: &Path) -> [f64; 8] {
    let beta = [20.0, -0.001, 0.2, 5.0, -0.02, -0.25, 0.004, 0.002];
    let mut text = String::from("time,avg_price,proportion,deliverymen_number,latency,tip,distance\n");
    let mut state = 9u64;
    let mut next = move || {
        // xorshift for portable pseudo-data
        state ^= state << 13;
        state ^= state >> 7;
        state ^= state << 17;
        (state % 10_000) as f64 / 10_000.0
    };
    for _ in 0..400 {
        let time = -60.0 + 150.0 * next();
        let avg_price = 30.0 * next();
        let proportion = next();
        let deliverymen = (100.0 + 800.0 * next()).round();
        let tip = (20.0 * next()).round();
        let distance = (500.0 + 6000.0 * next()).round();
        let x = [
            1.0,
            time * time,
            avg_price,
            proportion,
            deliverymen,
            tip,
            distance,
            distance / (tip + 1.0),
        ];
        let latency: f64 = x.iter().zip(beta).map(|(a, b)| a * b).sum();
        assert!(
            latency > 0.5 && latency < 119.0,
            "plant produced out-of-window latency {latency}"
        );
        text.push_str(&format!(
            "{time},{avg_price},{proportion},{deliverymen},{latency},{tip},{distance}\n"
        ));
    }
    // undeliverable block, separable on courier count
    for _ in 0..80 {
        let time = -60.0 + 150.0 * next();
        let avg_price = 30.0 * next();
        let proportion = next();
        let deliverymen = (1.0 + 4.0 * next()).round();
        let tip = (20.0 * next()).round();
        let distance = (500.0 + 6000.0 * next()).round();
        text.push_str(&format!(
            "{time},{avg_price},{proportion},{deliverymen},-1,{tip},{distance}\n"
        ));
    }
    fs::write(path, text).unwrap();
    beta
}

#[test]
fn fit_recovers_planted_coefficients() {
    let dir = tempfile::tempdir().unwrap();
    let records = dir.path().join("records.csv");
    let beta = write_planted_records(&records);
    let out = bin()
        .args(["--out-dir", dir.path().to_str().unwrap(), "fit"])
        .args(["--records", records.to_str().unwrap()])
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", stderr(&out));
    let model: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("model.json")).unwrap()).unwrap();
    let fitted: Vec<f64> = model["linear"]["beta"]
        .as_array()
        .unwrap()
        .iter()
        .map(|v| v.as_f64().unwrap())
        .collect();
    for (f, b) in fitted.iter().zip(beta) {
        assert!((f - b).abs() < 1e-6, "fitted {f} vs planted {b}");
    }
    assert!(dir.path().join("partial_dependence.csv").exists());
    assert!(model["metadata"]["config_hash"].as_str().unwrap().len() == 16);
}

#[test]
fn fit_missing_column_is_named() {
    let dir = tempfile::tempdir().unwrap();
    let records = dir.path().join("records.csv");
    fs::write(
        &records,
        "time,avg_price,proportion,deliverymen_number,latency,distance\n0,1,0.5,10,5,1000\n",
    )
    .unwrap();
    let out = bin()
        .args(["--out-dir", dir.path().to_str().unwrap(), "fit"])
        .args(["--records", records.to_str().unwrap()])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(3));
    assert!(stderr(&out).contains("tip"), "{}", stderr(&out));
}

#[test]
fn fit_twice_writes_identical_model() {
    let dir = tempfile::tempdir().unwrap();
    let records = dir.path().join("records.csv");
    write_planted_records(&records);
    let run = || {
        let out = bin()
            .args(["--out-dir", dir.path().to_str().unwrap(), "fit"])
            .args(["--records", records.to_str().unwrap()])
            .output()
            .unwrap();
        assert!(out.status.success(), "{}", stderr(&out));
        fs::read(dir.path().join("model.json")).unwrap()
    };
    assert_eq!(run(), run());
}

/// model.json carrying the published coefficient table.
fn preset_model(path: &Path) {
    let artifact = serde_json::json!({
        "logistic": {
            "theta": [0.0154, 0.0276, -0.8862, 0.0066, -0.0009],
            "standardization": [
                {"mean": 0.0, "scale": 1.0},
                {"mean": 0.0, "scale": 1.0},
                {"mean": 0.0, "scale": 1.0},
                {"mean": 0.0, "scale": 1.0},
                {"mean": 0.0, "scale": 1.0}
            ],
            "loss_trace": []
        },
        "linear": {
            "beta": [-0.1687, -0.0025, -0.3371, -33.6719, -0.0167, -0.088, 0.0079, 0.0010],
            "sse": 0.0,
            "s2": 0.0,
            "se": [0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0],
            "t_values": [0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0],
            "f_statistic": 0.0,
            "n": 0
        },
        "metadata": {"seed": 0, "record_count": 0, "config_hash": "0000000000000000"}
    });
    fs::write(path, serde_json::to_string_pretty(&artifact).unwrap()).unwrap();
}

#[test]
fn advise_reference_case_matches_hand_root() {
    let dir = tempfile::tempdir().unwrap();
    let model = dir.path().join("model.json");
    preset_model(&model);
    // solved by hand via the quadratic: t = 31.39 at two decimals
    let out = bin()
        .args(["advise", "--model", model.to_str().unwrap()])
        .args(["--target-latency", "5"])
        .args(["--time", "0", "--avg-tip", "0", "--proportion", "0", "--deliverymen", "0"])
        .args(["--distance", "1000"])
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", stderr(&out));
    let text = stdout(&out);
    assert!(text.contains("advised tip: 31.39"), "{text}");
}

#[test]
fn advise_target_already_met_prints_zero() {
    let dir = tempfile::tempdir().unwrap();
    let model = dir.path().join("model.json");
    preset_model(&model);
    let out = bin()
        .args(["advise", "--model", model.to_str().unwrap()])
        .args(["--target-latency", "30"])
        .args(["--time", "0", "--avg-tip", "0", "--proportion", "0", "--deliverymen", "0"])
        .args(["--distance", "1000"])
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", stderr(&out));
    assert!(stdout(&out).contains("advised tip: 0.00"), "{}", stdout(&out));
}

#[test]
fn advise_absurd_target_is_infeasible_with_exit_4() {
    let dir = tempfile::tempdir().unwrap();
    let model = dir.path().join("model.json");
    preset_model(&model);
    let out = bin()
        .args(["advise", "--model", model.to_str().unwrap()])
        .args(["--target-latency", "0.001"])
        .args(["--time", "0", "--avg-tip", "0", "--proportion", "0", "--deliverymen", "0"])
        .args(["--distance", "4000"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(4), "{}", stderr(&out));
    assert!(stderr(&out).contains("no tip in range"), "{}", stderr(&out));
}

#[test]
fn usage_errors_exit_2() {
    let out = bin().args(["advise"]).output().unwrap(); // missing required flags
    assert_eq!(out.status.code(), Some(2));
}
