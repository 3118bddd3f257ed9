use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn pbgnet(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_pbgnet"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

fn train_blobs(out: &Path, seed: &str) -> Value {
    let o = pbgnet(&[
        "train",
        "--task",
        "blobs",
        "--method",
        "pbgnet",
        "--width",
        "3",
        "--epochs",
        "8",
        "--lr",
        "0.05",
        "--seed",
        seed,
        "--out-dir",
        out.to_str().unwrap(),
    ]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    serde_json::from_str(&std::fs::read_to_string(out.join("run.json")).unwrap()).unwrap()
}

fn without_paths(mut v: Value) -> Value {
    let m = v.as_object_mut().unwrap();
    m.remove("history_path");
    m.remove("checkpoint_path");
    v
}

#[test]
fn exit_codes() {
    assert_eq!(code(&pbgnet(&[])), 1);
    assert_eq!(code(&pbgnet(&["--help"])), 0);
    assert_eq!(code(&pbgnet(&["train", "--task", "blobs"])), 1);
    assert_eq!(
        code(&pbgnet(&["train", "--task", "nope", "--method", "pbgnet"])),
        1
    );
    assert_eq!(
        code(&pbgnet(&[
            "train", "--task", "blobs", "--method", "pbgnet", "--layers", "4"
        ])),
        1
    );
    let empty = tempfile::tempdir().unwrap();
    let d = empty.path().to_str().unwrap();
    assert_eq!(
        code(&pbgnet(&[
            "train",
            "--task",
            "mnist17",
            "--method",
            "pbgnet",
            "--data-dir",
            d
        ])),
        2
    );
    assert_eq!(code(&pbgnet(&["verify", "--dir", d])), 1);
}

#[test]
fn same_seed_same_record() {
    let tmp = tempfile::tempdir().unwrap();
    let a = train_blobs(&tmp.path().join("a"), "3");
    let b = train_blobs(&tmp.path().join("b"), "3");
    assert_eq!(without_paths(a.clone()), without_paths(b));
    let c = train_blobs(&tmp.path().join("c"), "4");
    assert_ne!(without_paths(a), without_paths(c));
}

#[test]
fn certify_verify_and_surface() {
    let tmp = tempfile::tempdir().unwrap();
    let run = tmp.path().join("run");
    let record = train_blobs(&run, "1");
    let ck = run.join("checkpoint.json");
    let ck = ck.to_str().unwrap();

    let certify = |delta: &str| {
        let o = pbgnet(&["certify", "--checkpoint", ck, "--delta", delta]);
        assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
        serde_json::from_slice::<Value>(&o.stdout).unwrap()
    };
    let first = certify("0.05");
    assert_eq!(first, certify("0.05"));
    assert_eq!(first["seeger_bound"], record["bound"]["seeger_bound"]);
    let loose = certify("0.5");
    assert!(loose["seeger_bound"].as_f64().unwrap() < first["seeger_bound"].as_f64().unwrap());

    let o = pbgnet(&["verify", "--dir", run.to_str().unwrap()]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stdout));

    let o = pbgnet(&["surface", "--checkpoint", ck, "--resolution", "5"]);
    assert_eq!(code(&o), 0);
    let csv = String::from_utf8(o.stdout).unwrap();
    assert!(csv.starts_with("x1,x2,G,f,psi_---"));
    assert_eq!(csv.lines().count(), 26);
}

#[test]
fn tampered_record_fails_verification() {
    let tmp = tempfile::tempdir().unwrap();
    let run = tmp.path().join("run");
    let mut record = train_blobs(&run, "2");
    let e = record["test"]["zero_one"].as_f64().unwrap();
    record["test"]["zero_one"] = Value::from(e + 0.01);
    std::fs::write(
        run.join("run.json"),
        serde_json::to_string(&record).unwrap(),
    )
    .unwrap();
    assert_eq!(
        code(&pbgnet(&["verify", "--dir", run.to_str().unwrap()])),
        3
    );
}

#[test]
fn small_grid_selects_each_method() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("grid");
    let o = pbgnet(&[
        "grid",
        "--task",
        "blobs",
        "--method",
        "pbgnet,mlp,pbgnet_l_bnd",
        "--layers",
        "1",
        "--width",
        "2",
        "--exact",
        "--lr",
        "0.05",
        "--weight-decay",
        "0,0.0001",
        "--epochs",
        "3",
        "--out-dir",
        out.to_str().unwrap(),
    ]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let selections: Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(selections.as_array().unwrap().len(), 3);
    assert_eq!(
        code(&pbgnet(&["verify", "--dir", out.to_str().unwrap()])),
        0
    );
}
