use std::path::PathBuf;
use std::process::{Command, Output};

use bnn_verify::encode::read_mps;
use bnn_verify::sdp::read_sdpa;

fn data(name: &str) -> String {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("examples/data")
        .join(name)
        .display()
        .to_string()
}

fn run(args: &[&str]) -> Output {
    let model = data("example1.json");
    let input = data("example1_input.txt");
    let mut full = vec![args[0], "--model", &model, "--input", &input];
    full.extend_from_slice(&args[1..]);
    Command::new(env!("CARGO_BIN_EXE_bnn-verify")).args(&full).output().unwrap()
}

fn report(out: &Output) -> serde_json::Value {
    serde_json::from_slice(&out.stdout).unwrap()
}

#[test]
fn zero_radius_is_robust() {
    let out = run(&["verify", "--norm", "linf", "--eps", "0"]);
    assert_eq!(out.status.code(), Some(0));
    let r = report(&out);
    assert_eq!(r["verdict"], "robust");
    assert_eq!(r["true_label"], 2);
    assert_eq!(r["targets"][0]["k"], 1);
}

#[test]
fn small_radius_is_certified_by_every_relaxation() {
    for method in ["lp", "sdp1", "sdp1-tight", "oracle"] {
        let out = run(&["verify", "--norm", "linf", "--eps", "0.5", "--method", method]);
        assert_eq!(out.status.code(), Some(0), "{method}");
        let r = report(&out);
        assert!(r["targets"][0]["lambda_rig"].as_f64().unwrap() > 0.0, "{method}");
    }
}

#[test]
fn large_radius_is_falsified_with_a_witness() {
    let out = run(&["verify", "--norm", "linf", "--eps", "1.0"]);
    assert_eq!(out.status.code(), Some(1));
    let r = report(&out);
    assert_eq!(r["verdict"], "falsified");
    assert_eq!(r["witness"]["label"], 1);
}

#[test]
fn relaxation_gap_without_witness_is_unknown() {
    let out = run(&["verify", "--norm", "linf", "--eps", "0.7", "--method", "lp", "--samples", "5"]);
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(report(&out)["verdict"], "unknown");
    let exact = run(&["verify", "--norm", "linf", "--eps", "0.7", "--method", "oracle", "--samples", "5"]);
    assert_eq!(exact.status.code(), Some(1));
}

#[test]
fn sampling_alone_never_certifies() {
    let out = run(&["verify", "--norm", "linf", "--eps", "0.6", "--method", "sample-ub"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn reports_are_reproducible_and_can_go_to_a_file() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("report.json");
    let p = path.display().to_string();
    let a = run(&["verify", "--norm", "l2", "--eps", "0.6", "--metrics", "--json", &p]);
    assert_eq!(a.status.code(), Some(0));
    let mut first: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&path).unwrap()).unwrap();
    let b = run(&["verify", "--norm", "l2", "--eps", "0.6", "--metrics", "--json", &p]);
    assert_eq!(b.status.code(), Some(0));
    let mut second: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&path).unwrap()).unwrap();
    for r in [&mut first, &mut second] {
        for t in r["targets"].as_array_mut().unwrap() {
            t["wall_time_s"] = serde_json::Value::Null;
        }
    }
    assert_eq!(first, second);
    assert!(first["metrics"].is_array());
}

#[test]
fn errors_exit_with_three() {
    let out = Command::new(env!("CARGO_BIN_EXE_bnn-verify"))
        .args(["verify", "--model", "missing.json", "--input", "missing.txt", "--norm", "linf", "--eps", "0.1"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(3));
    assert!(!out.stderr.is_empty());
    let zero_label = run(&["verify", "--norm", "linf", "--eps", "0.1", "--label", "0"]);
    assert_eq!(zero_label.status.code(), Some(3));
    let negative = run(&["verify", "--norm", "linf", "--eps", "-1"]);
    assert_eq!(negative.status.code(), Some(3));
}

#[test]
fn exports_parse_back() {
    let dir = tempfile::tempdir().unwrap();
    let sdpa = dir.path().join("p.dat-s");
    let out = run(&["export", "--norm", "l2", "--eps", "0.8", "--kind", "sdpa", "--out", &sdpa.display().to_string()]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let p = read_sdpa(&std::fs::read_to_string(&sdpa).unwrap()).unwrap();
    assert!(p.block_sizes.iter().any(|&s| s < 0));

    let mps = dir.path().join("p.mps");
    let out = run(&["export", "--norm", "linf", "--eps", "1.0", "--kind", "mps", "--out", &mps.display().to_string()]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let m = read_mps(&std::fs::read_to_string(&mps).unwrap()).unwrap();
    assert_eq!(m.integer_count(), 4);

    let relaxed = dir.path().join("r.mps");
    let out = run(&[
        "export", "--norm", "linf", "--eps", "1.0", "--kind", "mps", "--relaxed", "--out", &relaxed.display().to_string(),
    ]);
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(read_mps(&std::fs::read_to_string(&relaxed).unwrap()).unwrap().integer_count(), 0);

    let lp = dir.path().join("p.lp");
    let out = run(&["export", "--norm", "linf", "--eps", "1.0", "--kind", "lp", "--out", &lp.display().to_string()]);
    assert_eq!(out.status.code(), Some(0));
    let text = std::fs::read_to_string(&lp).unwrap();
    assert!(text.contains("Binaries") && text.contains("x = 2*z - 1"));
}
