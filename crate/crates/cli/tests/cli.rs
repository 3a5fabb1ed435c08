use std::path::Path;
use std::process::{Command, Output};

fn stealthkit(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_stealthkit"))
        .current_dir(dir)
        .args(args)
        .env_remove("STEALTHKIT_BENCH_ITERS")
        .output()
        .expect("binary runs")
}

fn ok(dir: &Path, args: &[&str]) -> String {
    let out = stealthkit(dir, args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn keygen(dir: &Path) {
    ok(
        dir,
        &["keygen", "--seed", "1", "--out", "bob.json", "--public-out", "bob.pub.json", "--auditor-out", "bob.aud.json"],
    );
}

#[test]
fn send_and_scan_with_resume() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    keygen(d);
    let common = ["--epoch-n", "3", "--ledger-file", "ledger.bin"];
    let send = |seed: &str, count: &str| {
        let mut args = vec!["send", "--to", "bob.pub.json", "--state-file", "alice.state", "--seed", seed, "--count", count];
        args.extend(common);
        ok(d, &args)
    };
    let out = send("2", "4");
    assert_eq!(out.lines().filter(|l| l.starts_with("cold ")).count(), 2);
    assert_eq!(out.lines().filter(|l| l.starts_with("warm ")).count(), 2);

    let mut scan = vec!["scan", "--keys", "bob.json", "--state-file", "bob.state"];
    scan.extend(common);
    let first = ok(d, &scan);
    assert!(first.contains("4 matches in 4 txs"), "{first}");
    assert_eq!(first.matches("spend key").count(), 4);

    send("3", "2");
    let second = ok(d, &scan);
    assert!(second.contains("2 matches in 2 txs"), "{second}");
    // Both were warm and precomputed: one refill for the middle tx.
    assert!(second.contains("ops {rp:0, fp:1, h:1}"), "{second}");

    let mut audit = vec!["scan", "--keys", "bob.aud.json", "--state-file", "aud.state"];
    audit.extend(common);
    let audited = ok(d, &audit);
    assert!(audited.contains("6 matches in 6 txs"), "{audited}");
    assert!(!audited.contains("spend key"));
}

#[test]
fn baseline_scheme_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    keygen(d);
    ok(d, &["send", "--scheme", "dksap", "--to", "bob.pub.json", "--count", "3", "--ledger-file", "l.bin"]);
    let out = ok(d, &["scan", "--scheme", "dksap", "--keys", "bob.json", "--ledger-file", "l.bin"]);
    assert!(out.contains("3 matches in 3 txs; ops {rp:3, fp:3, h:3}"), "{out}");
}

#[test]
fn errors_exit_nonzero() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    keygen(d);
    let wrong_backend = stealthkit(
        d,
        &["--backend", "p256", "send", "--to", "bob.pub.json", "--ledger-file", "l.bin", "--state-file", "s"],
    );
    assert!(!wrong_backend.status.success());
    assert!(String::from_utf8_lossy(&wrong_backend.stderr).contains("backend"));
    assert!(!stealthkit(d, &["bench", "--iterations", "5"]).status.success());
    assert!(!stealthkit(d, &["send", "--to", "bob.pub.json"]).status.success());
    assert!(!stealthkit(d, &["scan", "--keys", "bob.pub.json", "--ledger-file", "missing.bin"]).status.success());
    assert!(!stealthkit(d, &["--epoch-n", "0", "simulate"]).status.success());
}

#[test]
fn counts_simulate_and_bench() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let counts = ok(d, &["counts", "--n", "1,10"]);
    assert!(counts.contains("dksap-iot  sender    N=10  {rp:1, fp:11, h:10}"), "{counts}");

    let sim = ok(d, &["simulate", "--seed", "9", "--epoch-n", "4", "--lookahead", "2"]);
    assert_eq!(sim.matches(", ok ops").count(), 3, "{sim}");

    ok(d, &["bench", "--n", "2,3", "--iterations", "100", "--csv-out", "out.csv"]);
    let csv = std::fs::read_to_string(d.join("out.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("scheme,side,N,rp,fp,h,modeled_ms,measured_ms,wire_bytes"));
    assert_eq!(lines.count(), 8);
}
