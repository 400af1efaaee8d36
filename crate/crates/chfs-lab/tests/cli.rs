//! End-to-end checks of the command-line binary: exit codes, record files,
//! replay, configuration layering, and the report aggregator.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> Command {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_chfs-lab"));
    // Keep the ambient environment from leaking a default seed into tests.
    cmd.env_remove("CHFS_LAB_SEED");
    cmd
}

fn tmp_dir(name: &str) -> PathBuf {
    let dir = PathBuf::from(env!("CARGO_TARGET_TMPDIR")).join(name);
    let _ = fs::remove_dir_all(&dir);
    fs::create_dir_all(&dir).unwrap();
    dir
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

fn run_lemma(dir: &Path, seed: &str) -> Output {
    bin()
        .args(["lemma", "--id", "lubkin", "--n", "4", "--samples", "500", "--seed", seed])
        .arg("--output-dir")
        .arg(dir)
        .output()
        .unwrap()
}

#[test]
fn lemma_run_writes_both_record_files() {
    let dir = tmp_dir("cli-lemma");
    let out = run_lemma(&dir, "11");
    assert_eq!(out.status.code(), Some(0), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    let text = stdout(&out);
    assert!(text.contains("record written to"), "stdout: {text}");
    assert!(dir.join("lemma-11.json").is_file());
    assert!(dir.join("lemma-11.md").is_file());
}

#[test]
fn replay_reproduces_and_detects_tampering() {
    let dir = tmp_dir("cli-replay");
    assert_eq!(run_lemma(&dir, "4242").status.code(), Some(0));
    let record = dir.join("lemma-4242.json");

    let out = bin().arg("replay").arg(&record).output().unwrap();
    assert_eq!(out.status.code(), Some(0));
    assert!(stdout(&out).contains("byte for byte"));

    // Flip the stored seed: the re-execution must diverge and exit 1.
    let tampered = fs::read_to_string(&record).unwrap().replace("4242", "4243");
    fs::write(&record, tampered).unwrap();
    let out = bin().arg("replay").arg(&record).output().unwrap();
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("DIVERGED"));
}

#[test]
fn usage_errors_exit_two() {
    let dir = tmp_dir("cli-usage");
    let unknown_id = bin()
        .args(["lemma", "--id", "未知"])
        .arg("--output-dir")
        .arg(&dir)
        .output()
        .unwrap();
    assert_eq!(unknown_id.status.code(), Some(2));

    let bad_case = bin()
        .args(["conjecture", "--case", "wedge"])
        .arg("--output-dir")
        .arg(&dir)
        .output()
        .unwrap();
    assert_eq!(bad_case.status.code(), Some(2));

    let bad_env = bin()
        .args(["lemma", "--id", "lubkin", "--n", "4", "--samples", "100"])
        .arg("--output-dir")
        .arg(&dir)
        .env("CHFS_LAB_SEED", "not-a-number")
        .output()
        .unwrap();
    assert_eq!(bad_env.status.code(), Some(2));
}

#[test]
fn seed_precedence_is_flag_over_env_over_default() {
    let dir = tmp_dir("cli-seed");
    let env_only = bin()
        .args(["lemma", "--id", "lubkin", "--n", "4", "--samples", "100"])
        .arg("--output-dir")
        .arg(&dir)
        .env("CHFS_LAB_SEED", "99")
        .output()
        .unwrap();
    assert_eq!(env_only.status.code(), Some(0));
    assert!(dir.join("lemma-99.json").is_file(), "env var should set the seed");

    let flag_beats_env = bin()
        .args(["lemma", "--id", "lubkin", "--n", "4", "--samples", "100", "--seed", "5"])
        .arg("--output-dir")
        .arg(&dir)
        .env("CHFS_LAB_SEED", "99")
        .output()
        .unwrap();
    assert_eq!(flag_beats_env.status.code(), Some(0));
    assert!(dir.join("lemma-5.json").is_file(), "explicit flag should win over the env var");
}

#[test]
fn config_file_drives_a_run_and_must_name_the_right_command() {
    let dir = tmp_dir("cli-config");
    let config = dir.join("run.toml");
    fs::write(
        &config,
        "command = \"lemma\"\nseed = 21\nid = \"lubkin\"\nn = 4\nsamples = 200\n",
    )
    .unwrap();

    let out = bin()
        .arg("lemma")
        .arg("--config")
        .arg(&config)
        .arg("--output-dir")
        .arg(&dir)
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    assert!(dir.join("lemma-21.json").is_file());

    let mismatched = bin()
        .arg("conjecture")
        .arg("--config")
        .arg(&config)
        .arg("--output-dir")
        .arg(&dir)
        .output()
        .unwrap();
    assert_eq!(mismatched.status.code(), Some(2), "config names lemma, subcommand says conjecture");
}

#[test]
fn report_aggregates_records_into_csv_and_markdown() {
    let dir = tmp_dir("cli-report");
    assert_eq!(run_lemma(&dir, "1").status.code(), Some(0));
    assert_eq!(run_lemma(&dir, "2").status.code(), Some(0));

    let out = bin().args(["report", "--dir"]).arg(&dir).output().unwrap();
    assert_eq!(out.status.code(), Some(0));
    assert!(stdout(&out).contains("2 records"));

    let csv = fs::read_to_string(dir.join("report.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("file,command,seed,metric,value"));
    assert!(csv.contains("lemma-1.json,lemma,1,"));
    assert!(csv.contains("lemma-2.json,lemma,2,"));
    assert!(dir.join("report.md").is_file());
}
