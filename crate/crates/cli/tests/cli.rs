use std::fs;
use std::io::{BufRead, BufReader};
use std::net::TcpListener;
use std::path::Path;
use std::process::{Command, Output};
use std::thread;

fn symint(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_symint"))
        .args(args)
        .env_remove("SYMINT_MODEL_ADDR")
        .env_remove("SYMINT_MODEL_CMD")
        .output()
        .expect("binary runs")
}

fn text(b: &[u8]) -> String {
    String::from_utf8_lossy(b).into_owned()
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

const SMALL_SAGGA: [&str; 12] = [
    "--seed-size", "10", "--generation-size", "60", "--clusters", "3", "--archive-size", "40", "--generations", "8",
    "--workers", "2",
];

#[test]
fn reference_suite_has_zero_failure_rates() {
    let out = symint(&["suite", "--family", "primitives", "--range", "1:100", "--n", "30", "--k", "1,10,50", "--seed", "1"]);
    assert!(out.status.success(), "{}", text(&out.stderr));
    let stdout = text(&out.stdout);
    assert!(stdout.contains("Fail@50"), "{stdout}");
    let rates: Vec<&str> = stdout.split_whitespace().filter(|w| w.ends_with('%')).collect();
    assert_eq!(rates.len(), 8 * 3, "{stdout}");
    assert!(rates.iter().all(|r| *r == "0.0%"), "{stdout}");
}

#[test]
fn identical_runs_write_identical_records() {
    let dir = tempfile::tempdir().unwrap();
    let run = |name: &str| {
        let path = dir.path().join(name);
        let out = symint(&[
            "suite", "--family", "perturb", "--kind", "add-ln", "--n", "20", "--k", "1,3", "--seed", "4", "--model",
            "faulty:p=0.4", "--out", p(&path),
        ]);
        assert!(out.status.success(), "{}", text(&out.stderr));
        let body = fs::read_to_string(path).unwrap();
        let mut lines = body.lines();
        assert!(lines.next().unwrap().contains("\"header\""));
        lines.map(str::to_string).collect::<Vec<_>>()
    };
    let a = run("a.jsonl");
    assert_eq!(a.len(), 140);
    assert_eq!(a, run("b.jsonl"));
}

#[test]
fn sagga_archive_verifies_and_reports() {
    let dir = tempfile::tempdir().unwrap();
    let archive = dir.path().join("out.archive");
    let mut args = vec!["sagga", "--fitness", "short", "--model", "faulty:p=0.5", "--seed", "7", "--out", p(&archive)];
    args.extend(SMALL_SAGGA);
    let out = symint(&args);
    assert!(out.status.success(), "{}", text(&out.stderr));
    let stdout = text(&out.stdout);
    assert!(stdout.contains("40 entries"), "{stdout}");
    assert!(stdout.contains("mean len") && stdout.contains("depth"), "{stdout}");
    assert!(text(&out.stderr).contains("generation   0:"));
    assert!(dir.path().join("out.archive.ckpt").exists());

    let out = symint(&["verify", "--archive", p(&archive), "--seed", "7"]);
    assert!(out.status.success(), "{}", text(&out.stderr));
    assert!(text(&out.stdout).contains("40 of 40 archived failures re-verified (100.0%)"), "{}", text(&out.stdout));

    let out = symint(&["verify", "--archive", p(&archive), "--seed", "7", "--requery", "--model", "faulty:p=0.5"]);
    assert!(text(&out.stdout).contains("(100.0%)"), "{}", text(&out.stdout));

    let out = symint(&["report", "--archive", &format!("short={}", p(&archive)), "--seed", "0"]);
    assert!(out.status.success(), "{}", text(&out.stderr));
    assert!(text(&out.stdout).lines().any(|l| l.starts_with("short") && l.contains(" 40 ")), "{}", text(&out.stdout));
}

#[test]
fn usage_errors_exit_one() {
    for args in [
        vec!["suite", "--family", "exp"],
        vec!["suite", "--family", "exp", "--seed", "1", "--bogus"],
        vec!["suite", "--family", "exp", "--seed", "1", "--model", "oracle"],
        vec!["suite", "--family", "primitives", "--seed", "1", "--range", "5"],
        vec!["sagga", "--seed", "1", "--fitness", "length:0"],
        vec!["sagga", "--seed", "1", "--seed-size", "2", "--clusters", "5"],
        vec!["verify", "--seed", "1"],
        vec!["report", "--seed", "1"],
    ] {
        let out = symint(&args);
        assert_eq!(out.status.code(), Some(1), "{args:?}: {}", text(&out.stderr));
        assert!(!out.stderr.is_empty());
    }
    let out = symint(&["suite", "--family", "exp", "--seed", "1", "--model", "oracle"]);
    assert!(text(&out.stderr).contains("--model"));
    assert_eq!(symint(&["--help"]).status.code(), Some(0));
}

#[test]
fn unreachable_backend_exits_two_with_checkpoint() {
    let dir = tempfile::tempdir().unwrap();
    let port = TcpListener::bind("127.0.0.1:0").unwrap().local_addr().unwrap().port();
    let ckpt = dir.path().join("run.ckpt");
    let model = format!("external:tcp=127.0.0.1:{port}");
    let mut args = vec!["sagga", "--seed", "3", "--model", &model, "--checkpoint", p(&ckpt)];
    args.extend(SMALL_SAGGA);
    let out = symint(&args);
    assert_eq!(out.status.code(), Some(2), "{}", text(&out.stderr));
    assert!(text(&out.stderr).contains("--resume"));
    assert!(ckpt.exists());

    let out = symint(&["sagga", "--seed", "3", "--resume", p(&ckpt), "--model", "faulty:p=0.5"]);
    assert!(out.status.success(), "{}", text(&out.stderr));
    assert!(text(&out.stdout).contains("40 entries"));
}

#[test]
fn backend_dropping_mid_run_exits_two_with_checkpoint() {
    let dir = tempfile::tempdir().unwrap();
    let listener = TcpListener::bind("127.0.0.1:0").unwrap();
    let addr = listener.local_addr().unwrap().to_string();
    thread::spawn(move || {
        let (stream, _) = listener.accept().unwrap();
        let mut line = String::new();
        let _ = BufReader::new(stream).read_line(&mut line);
    });
    let archive = dir.path().join("a.archive");
    let model = format!("external:tcp={addr}");
    let mut args = vec!["sagga", "--seed", "3", "--model", &model, "--out", p(&archive)];
    args.extend(SMALL_SAGGA);
    let out = symint(&args);
    assert_eq!(out.status.code(), Some(2), "{}", text(&out.stderr));
    assert!(dir.path().join("a.archive.ckpt").exists());
    assert!(!archive.exists());
}

#[test]
fn suite_backend_failure_exits_two() {
    let port = TcpListener::bind("127.0.0.1:0").unwrap().local_addr().unwrap().port();
    let out = Command::new(env!("CARGO_BIN_EXE_symint"))
        .args(["suite", "--family", "exp", "--seed", "1", "--model", "external:tcp"])
        .env("SYMINT_MODEL_ADDR", format!("127.0.0.1:{port}"))
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2), "{}", text(&out.stderr));
}

#[test]
fn config_file_is_read_and_flags_override_it() {
    let dir = tempfile::tempdir().unwrap();
    let conf = dir.path().join("run.conf");
    fs::write(&conf, "# suite settings\nseed = 5\nfamily = primitives\ntemplates = cos,sin\nn = 12\nk = 1\nstrict-timeout = true\n").unwrap();
    let out = symint(&["suite", "--config", p(&conf)]);
    assert!(out.status.success(), "{}", text(&out.stderr));
    assert!(text(&out.stderr).contains("24 problems"), "{}", text(&out.stderr));
    let out = symint(&["suite", "--config", p(&conf), "--n", "7"]);
    assert!(text(&out.stderr).contains("14 problems"), "{}", text(&out.stderr));
    fs::write(&conf, "seed 5\n").unwrap();
    assert_eq!(symint(&["suite", "--config", p(&conf)]).status.code(), Some(1));
}

#[test]
fn report_renders_records_and_search_table() {
    let dir = tempfile::tempdir().unwrap();
    let records = dir.path().join("cos.jsonl");
    let model = "faulty:p=0.5,seed=2";
    let out = symint(&[
        "suite", "--family", "primitives", "--templates", "cos", "--n", "40", "--k", "1,5", "--seed", "2", "--model",
        model, "--out", p(&records),
    ]);
    assert!(out.status.success(), "{}", text(&out.stderr));
    let out = symint(&["report", "--records", p(&records), "--seed", "2", "--model", model]);
    assert!(out.status.success(), "{}", text(&out.stderr));
    let stdout = text(&out.stdout);
    assert!(stdout.contains("Fail@5"), "{stdout}");
    assert!(stdout.lines().count() > 4, "{stdout}");
}

#[test]
fn verify_problem_file() {
    let dir = tempfile::tempdir().unwrap();
    let file = dir.path().join("p.txt");
    fs::write(&file, "# problems\n2*x\tx^2\ncos(x)\tsin(x) + 3\nsin(x)\tcos(x)\nexp(x)\n").unwrap();
    let out = symint(&["verify", "--problems", p(&file), "--seed", "1"]);
    assert!(out.status.success(), "{}", text(&out.stderr));
    let stdout = text(&out.stdout);
    assert!(stdout.contains("2 of 3 listed antiderivatives verified; 1 problems without one"), "{stdout}");
    assert!(stdout.contains("incorrect: sin(x)"), "{stdout}");
}
