use std::path::PathBuf;
use std::process::{Command, Output};

fn corpus(rel: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../corpus").join(rel)
}

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_pipesync"))
        .args(args)
        .env_remove("PIPESYNC_HW")
        .output()
        .expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn json(o: &Output) -> serde_json::Value {
    serde_json::from_slice(&o.stdout).expect("json output")
}

#[test]
fn softmax_is_unsafe_with_one_violation() {
    let o = run(&["check", corpus("examples/softmax.pkdl").to_str().unwrap(), "--hw", "ascend910b2", "--format", "json"]);
    assert_eq!(code(&o), 1);
    let v = json(&o);
    assert_eq!(v["verdict"], "UNSAFE");
    let viol = v["violations"].as_array().unwrap();
    assert_eq!(viol.len(), 1);
    assert!(viol[0]["message"].as_str().unwrap().starts_with("VPU write to maxVal not visible to Scalar read"));
}

#[test]
fn empty_program_is_safe() {
    let o = run(&["check", corpus("examples/empty.pkdl").to_str().unwrap(), "--hw", "ascend910b2"]);
    assert_eq!(code(&o), 0);
    assert!(stdout(&o).contains("SAFE"));
}

#[test]
fn model_mismatch_is_structural() {
    let o = run(&["check", corpus("examples/softmax.pkdl").to_str().unwrap(), "--hw", "mlu370"]);
    assert_eq!(code(&o), 2);
    assert!(String::from_utf8_lossy(&o.stderr).contains("Scalar"));
}

#[test]
fn env_var_selects_model() {
    let o = Command::new(env!("CARGO_BIN_EXE_pipesync"))
        .args(["check", corpus("examples/softmax.pkdl").to_str().unwrap()])
        .env("PIPESYNC_HW", "mlu370")
        .output()
        .unwrap();
    assert_eq!(code(&o), 2);
}

#[test]
fn model_file_is_accepted() {
    let o = run(&["check", corpus("examples/softmax_barrier.pkdl").to_str().unwrap(), "--hw", corpus("models/ascend910b2.hw").to_str().unwrap()]);
    assert_eq!(code(&o), 0);
}

#[test]
fn usage_errors_exit_3() {
    assert_eq!(code(&run(&["frobnicate"])), 3);
    assert_eq!(code(&run(&["check"])), 3);
    assert_eq!(code(&run(&["check", corpus("examples/softmax.pkdl").to_str().unwrap(), "--hw", "nosuch"])), 3);
    assert_eq!(code(&run(&["check", "/nonexistent/k.pkdl", "--hw", "ascend910b2"])), 3);
    assert_eq!(code(&run(&["check", corpus("examples/softmax.pkdl").to_str().unwrap(), "--format", "yaml"])), 3);
    assert_eq!(code(&run(&["mutate", corpus("seeds").to_str().unwrap(), "--ops", "M9"])), 3);
}

#[test]
fn help_exits_zero() {
    assert_eq!(code(&run(&["--help"])), 0);
}

#[test]
fn parse_error_exits_2() {
    let o = run(&["check", corpus("audit/truncated_kernel.cpp").to_str().unwrap()]);
    assert_eq!(code(&o), 2);
    assert!(String::from_utf8_lossy(&o.stderr).contains("truncated"));
}

#[test]
fn json_output_is_stable_apart_from_timing() {
    let path = corpus("paired/add_pipeline.cpp");
    let args = ["check", path.to_str().unwrap(), "--format", "json"];
    let mut a = json(&run(&args));
    let mut b = json(&run(&args));
    a.as_object_mut().unwrap().remove("timing");
    b.as_object_mut().unwrap().remove("timing");
    assert_eq!(a, b);
    let text = stdout(&run(&args));
    let pos: Vec<usize> = ["verdict", "model", "violations", "diagnostics", "stats", "timing"]
        .iter()
        .map(|k| text.find(&format!("\n  \"{k}\"")).unwrap())
        .collect();
    assert!(pos.windows(2).all(|w| w[0] < w[1]), "{pos:?}");
}

#[test]
fn dot_and_trace_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let dot = dir.path().join("g.dot");
    let trace = dir.path().join("k.trace.json");
    let o = run(&[
        "check",
        corpus("paired/add_pipeline.cpp").to_str().unwrap(),
        "--dot",
        dot.to_str().unwrap(),
        "--trace",
        trace.to_str().unwrap(),
    ]);
    assert_eq!(code(&o), 0);
    let d = std::fs::read_to_string(&dot).unwrap();
    assert!(d.contains("style=dashed"), "cross-stage queues draw SO edges");
    assert!(d.contains("\"W/xLocal/MTE_in/MTE@1\""));
    let again = run(&["check", trace.to_str().unwrap(), "--format", "json"]);
    assert_eq!(code(&again), 0);
}

#[test]
fn audit_mixed_corpus() {
    let o = run(&["audit", corpus("audit").to_str().unwrap(), "--format", "json", "--jobs", "4"]);
    assert_eq!(code(&o), 1);
    let v = json(&o);
    assert_eq!(v["scanned"], 12);
    assert_eq!(v["safe"], 9);
    assert_eq!(v["unsafe"], 2);
    assert_eq!(v["structural_excluded"], 1);
    let malformed = v["kernels"].as_array().unwrap().iter().find(|k| k["path"].as_str().unwrap().ends_with("truncated_kernel.cpp")).unwrap();
    assert_eq!(malformed["verdict"], "STRUCTURAL_ERROR");
}

#[test]
fn audit_empty_dir() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(&["audit", dir.path().to_str().unwrap(), "--format", "json"]);
    assert_eq!(code(&o), 0);
    let v = json(&o);
    assert_eq!((v["scanned"].as_u64(), v["safe"].as_u64(), v["unsafe"].as_u64(), v["structural_excluded"].as_u64()), (Some(0), Some(0), Some(0), Some(0)));
}

#[test]
fn audit_missing_dir_is_usage_error() {
    assert_eq!(code(&run(&["audit", "/nonexistent/dir"])), 3);
}

#[test]
fn mutate_seed_corpus_detects_everything() {
    let o = run(&["mutate", corpus("seeds").to_str().unwrap(), "--format", "json"]);
    assert_eq!(code(&o), 0);
    let v = json(&o);
    assert_eq!(v["detection_rate"], 1.0);
    assert_eq!(v["rows"].as_array().unwrap().len(), 4);
}

#[test]
fn mutate_single_operator_row() {
    let o = run(&["mutate", corpus("seeds").to_str().unwrap(), "--ops", "M4"]);
    assert_eq!(code(&o), 0);
    let table = stdout(&o);
    assert!(table.contains("M4"));
    assert!(!table.contains("M1 "));
}

#[test]
fn mutate_empty_seed_dir() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(&["mutate", dir.path().to_str().unwrap(), "--format", "json"]);
    assert_eq!(code(&o), 0);
    assert_eq!(json(&o)["total"]["total"], 0);
}

#[test]
fn unsafe_seed_is_skipped_with_warning() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::copy(corpus("examples/softmax.pkdl"), dir.path().join("softmax.pkdl")).unwrap();
    let o = run(&["mutate", dir.path().to_str().unwrap(), "--format", "json"]);
    assert_eq!(code(&o), 0);
    assert!(String::from_utf8_lossy(&o.stderr).contains("skipping seed"));
    assert_eq!(json(&o)["skipped"].as_array().unwrap().len(), 1);
}
