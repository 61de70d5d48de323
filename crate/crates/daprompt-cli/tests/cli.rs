//! Smoke test of the full command-line workflow: generate, validate, train,
//! evaluate and sweep against a temporary workspace.

use std::path::Path;
use std::process::Command;

fn daprompt(args: &[&str]) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_daprompt"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(out: &std::process::Output) -> String {
    assert!(
        out.status.success(),
        "command failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8_lossy(&out.stdout).into_owned()
}

#[test]
fn gen_train_eval_sweep_workflow() {
    let dir = tempfile::tempdir().unwrap();
    let corpus = dir.path().join("toy.jsonl");
    let corpus_arg = corpus.to_str().unwrap();
    let ckpt = dir.path().join("run");
    let ckpt_arg = ckpt.to_str().unwrap();

    let out = daprompt(&[
        "gen", "--docs", "40", "--topics", "8", "--seed", "5", "--out", corpus_arg,
    ]);
    assert!(stdout(&out).contains("wrote 40 documents"));

    let out = daprompt(&["validate", "--corpus", corpus_arg]);
    let stats = stdout(&out);
    assert!(stats.contains("\"n_documents\": 40"));
    assert!(stats.contains("\"n_topics\": 8"));

    let cfg = dir.path().join("config.json");
    std::fs::write(
        &cfg,
        r#"{"backbone_name":"tiny-pool","dim":12,"learning_rate":0.01,
            "batch_size":4,"weight_decay":0.0,"epochs":2,"patience":0}"#,
    )
    .unwrap();
    let out = daprompt(&[
        "train", "--corpus", corpus_arg, "--config", cfg.to_str().unwrap(),
        "--seed", "1", "--out", ckpt_arg,
    ]);
    assert!(stdout(&out).contains("checkpoint at"));
    assert!(ckpt.join("model.json").exists());
    assert!(ckpt.join("train_log.jsonl").exists());

    let report = dir.path().join("report.csv");
    let out = daprompt(&[
        "eval", "--corpus", corpus_arg, "--checkpoint", ckpt_arg,
        "--rho", "0.6", "--out", report.to_str().unwrap(),
    ]);
    stdout(&out);
    let csv = std::fs::read_to_string(&report).unwrap();
    assert!(csv.starts_with("scope,fold,precision,recall,f1,n_pairs\n"));
    assert!(csv.contains("overall,"));

    // individual rule prints a single overall row
    let out = daprompt(&[
        "eval", "--corpus", corpus_arg, "--checkpoint", ckpt_arg,
        "--rho1", "0.3", "--rho2", "0.3",
    ]);
    assert_eq!(stdout(&out).lines().count(), 2);

    let out = daprompt(&[
        "sweep", "--corpus", corpus_arg, "--checkpoint", ckpt_arg,
        "--grid", "0.0:2.0:0.1",
    ]);
    let sweep = stdout(&out);
    assert!(sweep.starts_with("threshold,precision,recall,f1\n"));
    assert_eq!(sweep.lines().count(), 22); // header + 21 grid rows
}

#[test]
fn eval_is_byte_stable_across_runs() {
    let dir = tempfile::tempdir().unwrap();
    let corpus = dir.path().join("toy.jsonl");
    let corpus_arg = corpus.to_str().unwrap();
    let ckpt = dir.path().join("run");
    let ckpt_arg = ckpt.to_str().unwrap();
    daprompt(&["gen", "--docs", "24", "--topics", "6", "--out", corpus_arg]);
    let cfg = dir.path().join("config.json");
    std::fs::write(
        &cfg,
        r#"{"dim":8,"learning_rate":0.005,"batch_size":8,"epochs":1,"patience":0}"#,
    )
    .unwrap();
    let out = daprompt(&[
        "train", "--corpus", corpus_arg, "--config", cfg.to_str().unwrap(), "--out", ckpt_arg,
    ]);
    stdout(&out);
    let a = stdout(&daprompt(&["eval", "--corpus", corpus_arg, "--checkpoint", ckpt_arg]));
    let b = stdout(&daprompt(&["eval", "--corpus", corpus_arg, "--checkpoint", ckpt_arg]));
    assert_eq!(a, b);
    assert!(Path::new(ckpt_arg).join("run_manifest.json").exists());
}

#[test]
fn unknown_variant_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let corpus = dir.path().join("toy.jsonl");
    let corpus_arg = corpus.to_str().unwrap();
    daprompt(&["gen", "--docs", "12", "--topics", "4", "--out", corpus_arg]);
    let out = daprompt(&[
        "train", "--corpus", corpus_arg, "--variant", "bogus",
        "--out", dir.path().join("x").to_str().unwrap(),
    ]);
    assert!(!out.status.success());
}
