//! End-to-end runs of the `ladn` binary.

use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::{Command, Output, Stdio};

use ladn::params_file::{write_params, ParamsFile};
use ladn_core::DecoderParams;

const HAMMING: &str = "7 3\n3 4\n1 1 2 1 2 2 3\n4 4 4\n1 0 0\n2 0 0\n1 2 0\n3 0 0\n1 3 0\n2 3 0\n1 2 3\n1 3 5 7\n2 3 6 7\n4 5 6 7\n";

fn ladn(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ladn")).args(args).current_dir(cwd).output().unwrap()
}

fn ladn_stdin(args: &[&str], cwd: &Path, input: &str) -> Output {
    let mut child = Command::new(env!("CARGO_BIN_EXE_ladn"))
        .args(args)
        .current_dir(cwd)
        .stdin(Stdio::piped())
        .stdout(Stdio::piped())
        .stderr(Stdio::piped())
        .spawn()
        .unwrap();
    child.stdin.take().unwrap().write_all(input.as_bytes()).unwrap();
    child.wait_with_output().unwrap()
}

fn setup() -> (tempfile::TempDir, PathBuf) {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("h.alist"), HAMMING).unwrap();
    write_params(&dir.path().join("l2.toml"), &ParamsFile::from_params(&DecoderParams::fixed_l2(1.0, 1.2, 60))).unwrap();
    let p = dir.path().to_path_buf();
    (dir, p)
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

#[test]
fn decode_reports_codewords_with_exit_zero() {
    let (_d, p) = setup();
    let llr = "3 3 3 3 3 3 3\n-2 -2.5 -1.5 2 2 3 1\n";
    let o = ladn_stdin(&["decode", "--code", "h.alist", "--params", "l2.toml", "--stdin"], &p, llr);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let lines: Vec<String> = stdout(&o).lines().map(String::from).collect();
    assert_eq!(lines[0], "0000000");
    assert_eq!(lines[2], "1110000");
    assert!(lines[1].starts_with("residual=") && lines[1].ends_with("valid=true"));
}

#[test]
fn decode_flags_parity_failure_with_exit_two() {
    let (_d, p) = setup();
    // One stage is not enough to correct a single flipped bit.
    let short = ParamsFile::from_params(&DecoderParams::fixed_l2(1.0, 1.2, 1));
    write_params(&p.join("one.toml"), &short).unwrap();
    std::fs::write(p.join("in.txt"), "-1 1 1 1 1 1 1\n").unwrap();
    let o = ladn(&["decode", "--code", "h.alist", "--params", "one.toml", "--llr", "in.txt"], &p);
    assert_eq!(o.status.code(), Some(2), "{}", stdout(&o));
    assert!(stdout(&o).contains("valid=false"));
}

#[test]
fn decode_errors_exit_one() {
    let (_d, p) = setup();
    let o = ladn_stdin(&["decode", "--code", "h.alist", "--params", "l2.toml", "--stdin"], &p, "1 2 3\n");
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("line 1"));
    let o = ladn(&["decode", "--code", "missing.alist", "--params", "l2.toml", "--stdin"], &p);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("missing.alist"));
}

#[test]
fn decode_trace_has_one_row_per_stage() {
    let (_d, p) = setup();
    std::fs::write(p.join("in.txt"), "1 1 1 1 1 1 1\n0.5 -0.2 1 1 1 1 1\n").unwrap();
    let o = ladn(
        &["decode", "--code", "h.alist", "--params", "l2.toml", "--llr", "in.txt", "--residual-eps", "0", "--trace", "t.csv"],
        &p,
    );
    assert!(o.status.success());
    let csv = std::fs::read_to_string(p.join("t.csv")).unwrap();
    assert_eq!(csv.lines().next(), Some("frame,stage,residual"));
    assert_eq!(csv.lines().count(), 1 + 2 * 60);
    assert!(p.join("t.csv.manifest.toml").exists());
}

#[test]
fn plotdata_writes_curves() {
    let (_d, p) = setup();
    let o = ladn(&["plotdata", "--alpha", "0.5,1", "--params", "l2.toml", "--out", "g.csv"], &p);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let csv = std::fs::read_to_string(p.join("g.csv")).unwrap();
    assert_eq!(csv.lines().next(), Some("penalty,u,g,dg"));
    assert_eq!(csv.lines().count(), 1 + 3 * 1001);
}

#[test]
fn bench_and_replay_reproduce_output() {
    let (_d, p) = setup();
    let args =
        ["bench", "--code", "h.alist", "--baseline", "--params", "l2.toml", "--snr", "1,3", "--min-errors", "5", "--max-frames", "2000", "--out", "b.csv"];
    let o = ladn(&args, &p);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let first = std::fs::read_to_string(p.join("b.csv")).unwrap();
    let untimed = |csv: &str| -> Vec<String> {
        csv.lines().filter(|l| !l.starts_with('#')).map(|l| l.rsplit_once(',').unwrap().0.to_string()).collect()
    };
    let header = first.lines().find(|l| !l.starts_with('#')).unwrap();
    assert!(header.starts_with("decoder,snr_db,"), "{header}");
    assert_eq!(first.lines().filter(|l| !l.starts_with('#')).count(), 1 + 2 * 2);
    assert!(p.join("b.csv.compare.csv").exists());

    std::fs::remove_file(p.join("b.csv")).unwrap();
    let o = ladn(&["replay", "b.csv.manifest.toml"], &p);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(untimed(&std::fs::read_to_string(p.join("b.csv")).unwrap()), untimed(&first));

    write_params(&p.join("l2.toml"), &ParamsFile::from_params(&DecoderParams::fixed_l2(0.9, 1.2, 60))).unwrap();
    let o = ladn(&["replay", "b.csv.manifest.toml"], &p);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("l2.toml"));
}

#[test]
fn samples_do_not_depend_on_workers() {
    let (_d, p) = setup();
    let args = ["samples", "--code", "h.alist", "--snr", "2", "--n", "20", "--codeword-mode", "random-message", "--seed", "9", "--out"];
    let one = ladn(&[&["--workers", "1"], &args[..], &["a.txt"]].concat(), &p);
    assert!(one.status.success(), "{}", String::from_utf8_lossy(&one.stderr));
    assert!(ladn(&[&["--workers", "3"], &args[..], &["b.txt"]].concat(), &p).status.success());
    let a = std::fs::read_to_string(p.join("a.txt")).unwrap();
    assert_eq!(a, std::fs::read_to_string(p.join("b.txt")).unwrap());
    let s = ladn::samples::from_text(&a, "a.txt").unwrap();
    assert_eq!(s.len(), 20);
}

#[test]
fn sample_fingerprint_matches_library() {
    let (_d, p) = setup();
    let o = ladn(&["samples", "--code", "h.alist", "--snr", "2", "--n", "5", "--seed", "3", "--out", "s.txt"], &p);
    assert!(o.status.success());
    let text = std::fs::read_to_string(p.join("s.txt")).unwrap();
    let h = ladn::io::read_code(&p.join("h.alist")).unwrap().h;
    let s = ladn_core::channel::make_samples(
        &ladn_core::exec::Sequential,
        &h,
        5,
        2.0,
        ladn_core::channel::SnrConvention::EbN0,
        ladn_core::channel::CodewordMode::AllZero,
        3,
    )
    .unwrap();
    let fp = ladn::samples::fingerprint(&s);
    assert!(text.lines().nth(1).unwrap().ends_with(&format!("fingerprint={fp}")), "{fp}\n{text}");
    assert_eq!(ladn::samples::fingerprint(&ladn::samples::from_text(&text, "s.txt").unwrap()), fp);
}

#[test]
fn usage_errors_exit_one_and_help_exits_zero() {
    let (_d, p) = setup();
    assert_eq!(ladn(&["decode", "--bogus"], &p).status.code(), Some(1));
    assert_eq!(ladn(&["--help"], &p).status.code(), Some(0));
}

#[test]
fn oversized_seed_is_rejected_up_front() {
    let (_d, p) = setup();
    let big = (u64::MAX).to_string();
    let o = ladn(&["samples", "--code", "h.alist", "--snr", "2", "--n", "2", "--seed", &big, "--out", "s.txt"], &p);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("--seed"));
    assert!(!p.join("s.txt").exists());
}
