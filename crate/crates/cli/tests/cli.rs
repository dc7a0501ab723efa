use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn cogaug(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_cogaug"))
        .current_dir(dir)
        .args(args)
        .env_remove("COGAUG_GEN_URL")
        .env_remove("COGAUG_GEN_API_KEY")
        .env_remove("COGAUG_EMBED_URL")
        .env_remove("COGAUG_EMBED_API_KEY")
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn mock_generation_then_replay_is_identical() {
    let tmp = tempfile::tempdir().unwrap();
    let o = cogaug(tmp.path(), &["generate", "--out", "run"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let pool = fs::read_to_string(tmp.path().join("run/pool.jsonl")).unwrap();
    let mut lines = pool.lines();
    assert!(lines.next().unwrap().starts_with("# config_fingerprint="));
    assert_eq!(lines.count(), 210);

    fs::remove_file(tmp.path().join("run/pool.jsonl")).unwrap();
    let o = cogaug(tmp.path(), &["--mode", "replay", "generate", "--out", "run"]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert_eq!(fs::read_to_string(tmp.path().join("run/pool.jsonl")).unwrap(), pool);
}

#[test]
fn replay_without_recordings_fails_with_table() {
    let tmp = tempfile::tempdir().unwrap();
    let o = cogaug(tmp.path(), &["--mode", "replay", "generate", "--out", "empty"]);
    assert!(!o.status.success());
    let err = stderr(&o);
    assert!(err.contains("patient_id"), "{err}");
    assert!(err.contains("210 of 210 samples failed"), "{err}");
}

#[test]
fn live_mode_without_credentials_is_a_config_error() {
    let tmp = tempfile::tempdir().unwrap();
    let o = cogaug(tmp.path(), &["--mode", "live", "generate"]);
    assert!(!o.status.success());
    assert!(stderr(&o).contains("COGAUG_GEN_URL"), "{}", stderr(&o));
    assert!(!tmp.path().join("out").exists());
}

#[test]
fn quick_evaluation_is_deterministic() {
    let tmp = tempfile::tempdir().unwrap();
    assert!(cogaug(tmp.path(), &["generate", "--out", "run"]).status.success());
    let args = ["evaluate", "--out", "run", "--strategy", "similarity,noise", "--k", "0,3", "--seeds", "2"];
    let first = cogaug(tmp.path(), &args);
    assert!(first.status.success(), "{}", stderr(&first));
    let report = tmp.path().join("run/report");
    let sweep = fs::read_to_string(report.join("sweep.csv")).unwrap();
    let fingerprint = sweep.lines().next().unwrap().strip_prefix("# config_fingerprint=").unwrap().to_string();
    assert!(stdout(&first).contains(&fingerprint));
    assert_eq!(sweep.lines().count(), 2 + 4);

    let snapshot: Vec<(String, Vec<u8>)> = fs::read_dir(&report)
        .unwrap()
        .map(|e| {
            let e = e.unwrap();
            (e.file_name().to_string_lossy().into_owned(), fs::read(e.path()).unwrap())
        })
        .collect();
    let second = cogaug(tmp.path(), &args);
    assert!(second.status.success());
    for (name, bytes) in snapshot {
        assert_eq!(fs::read(report.join(&name)).unwrap(), bytes, "{name} changed");
    }

    let o = cogaug(tmp.path(), &["inspect", "run/report"]);
    assert!(o.status.success());
    assert!(stdout(&o).contains("best by RMSE"));
}

#[test]
fn inspect_pool_and_corrupt_files() {
    let tmp = tempfile::tempdir().unwrap();
    assert!(cogaug(tmp.path(), &["generate", "--out", "run"]).status.success());
    let o = cogaug(tmp.path(), &["inspect", "run/pool.jsonl"]);
    assert!(o.status.success());
    let out = stdout(&o);
    assert!(out.starts_with("210 samples, 30 patients"), "{out}");
    assert!(out.lines().any(|l| l.starts_with("P30")));

    let pool = fs::read_to_string(tmp.path().join("run/pool.jsonl")).unwrap();
    let broken = pool.replacen("\"style_name\":\"emotional\"", "\"style_name\":\"emotional\",,", 1);
    fs::write(tmp.path().join("broken.jsonl"), broken).unwrap();
    let o = cogaug(tmp.path(), &["inspect", "broken.jsonl"]);
    assert!(!o.status.success());
    assert!(stderr(&o).contains("at byte"), "{}", stderr(&o));

    let o = cogaug(tmp.path(), &["inspect", "missing.jsonl"]);
    assert!(!o.status.success());
}

#[test]
fn config_file_paths_and_validation() {
    let tmp = tempfile::tempdir().unwrap();
    fs::write(tmp.path().join("bad.toml"), "mode = \"mock\"\nunknown = true\n").unwrap();
    let o = cogaug(tmp.path(), &["--config", "bad.toml", "generate"]);
    assert!(!o.status.success());
    assert!(stderr(&o).contains("bad.toml"));

    fs::create_dir(tmp.path().join("cfg")).unwrap();
    fs::write(tmp.path().join("cfg/run.toml"), "out_dir = \"results\"\n[embedding]\nprovider = \"ngram\"\ndim = 64\n")
        .unwrap();
    let o = cogaug(tmp.path(), &["--config", "cfg/run.toml", "generate"]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(tmp.path().join("cfg/results/pool.jsonl").exists());
    let o = cogaug(tmp.path(), &["--config", "cfg/run.toml", "embed"]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(stdout(&o).contains("ngram-hash-v1-d64"));

    let o = cogaug(tmp.path(), &["--config", "cfg/run.toml", "--corpus", "nope.jsonl", "generate"]);
    assert!(!o.status.success());
    let o = cogaug(tmp.path(), &["--embedder", "remote", "embed"]);
    assert!(!o.status.success());
}
