use std::path::PathBuf;
use std::process::{Command, Output};

fn kcp(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_kcp"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8(o.stderr.clone()).unwrap()
}

fn scratch(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("kcp-cli-test-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    dir.join(name)
}

#[test]
fn verify_passes_and_is_reproducible() {
    let a = kcp(&["verify", "--seed", "7", "--trials", "40"]);
    assert_eq!(a.status.code(), Some(0), "{}", stdout(&a));
    assert!(stdout(&a).lines().filter(|l| l.starts_with("PASS")).count() >= 10);
    let b = kcp(&["verify", "--seed", "7", "--trials", "40"]);
    assert_eq!(a.stdout, b.stdout);
}

#[test]
fn poisoned_verify_fails_with_seed() {
    let o = kcp(&["verify", "--poison", "--trials", "10"]);
    assert_eq!(o.status.code(), Some(1));
    let out = stdout(&o);
    let line = out
        .lines()
        .find(|l| l.starts_with("FAIL"))
        .expect("a failing property");
    assert!(
        line.starts_with("FAIL multiply-equivalence seed="),
        "{line}"
    );
}

#[test]
fn tables_rows() {
    let o = kcp(&["tables"]);
    assert_eq!(o.status.code(), Some(0));
    let out = stdout(&o);
    let lines: Vec<&str> = out.lines().collect();
    assert_eq!(lines.len(), 15);
    assert!(lines[0].starts_with("dataset,ranks,sharing,params,paper_params,params_match"));
    assert!(
        lines.contains(&"UCF11,\"(4,4,2)\",false,4736,4736,match,12454.1,12454,match,91.5,73.1")
    );
    assert!(lines
        .iter()
        .any(|l| l.starts_with("UCF50,\"(6,2,2)\",true,1908,1908,match,278218.9,278219,match,")));
    assert!(lines
        .iter()
        .any(|l| l.starts_with("UCF11,\"(4,2,2)\",true,944,994,mismatch,")));
    assert!(stderr(&o).contains("944 vs published 994"));
}

#[test]
fn tables_custom_row() {
    let o = kcp(&[
        "tables",
        "--shape-in",
        "8,20,20,18",
        "--shape-out",
        "4,4,4,4",
        "--ranks",
        "4,4,2",
        "--sharing",
    ]);
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o)
        .lines()
        .nth(1)
        .unwrap()
        .starts_with("custom,\"(4,4,2)\",true,1664,"));
}

#[test]
fn curves_default_sweep() {
    let a = kcp(&["curves"]);
    assert_eq!(a.status.code(), Some(0));
    let out = stdout(&a);
    assert_eq!(out.lines().count(), 1 + 5 * 32);
    assert_eq!(out.lines().next(), Some("r,format,params,flops"));
    let at32: Vec<(String, u64, u64)> = out
        .lines()
        .skip(1)
        .filter(|l| l.starts_with("32,"))
        .map(|l| {
            let f: Vec<&str> = l.split(',').collect();
            (
                f[1].to_string(),
                f[2].parse().unwrap(),
                f[3].parse().unwrap(),
            )
        })
        .collect();
    let kcp_row = at32.iter().find(|r| r.0 == "KCP").unwrap();
    assert!(at32
        .iter()
        .filter(|r| r.0 != "KCP")
        .all(|r| r.1 > kcp_row.1 && r.2 > kcp_row.2));
    assert_eq!(a.stdout, kcp(&["curves"]).stdout);
}

#[test]
fn train_toy_exit_codes() {
    let one = kcp(&[
        "train-toy",
        "--epochs",
        "1",
        "--sequences",
        "16",
        "--length",
        "2",
    ]);
    let out = stdout(&one);
    assert_eq!(out.lines().count(), 2, "{out}");
    assert_eq!(out.lines().next(), Some("epoch,loss,train_accuracy"));

    let frozen = kcp(&[
        "train-toy",
        "--lr",
        "0",
        "--epochs",
        "3",
        "--sequences",
        "32",
        "--length",
        "2",
    ]);
    assert_ne!(frozen.status.code(), Some(0));
    let losses: Vec<String> = stdout(&frozen)
        .lines()
        .skip(1)
        .map(|l| l.split(',').nth(1).unwrap().to_string())
        .collect();
    assert!(losses.windows(2).all(|w| w[0] == w[1]));

    let diverged = kcp(&[
        "train-toy",
        "--lr",
        "1e305",
        "--epochs",
        "2",
        "--sequences",
        "16",
        "--length",
        "2",
    ]);
    assert_eq!(diverged.status.code(), Some(1));
    assert!(stderr(&diverged).contains("diverged"));
}

#[test]
fn weight_file_round_trip() {
    let path = scratch("w.kcpw");
    let p = path.to_str().unwrap();
    let o = kcp(&[
        "init-weight",
        "--shape-in",
        "2,3,4",
        "--shape-out",
        "3,2,2",
        "--ranks",
        "2,3,1",
        "--seed",
        "5",
        "--out",
        p,
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let info = kcp(&["inspect-weight", p]);
    assert_eq!(info.status.code(), Some(0));
    let text = stdout(&info);
    assert!(text.contains("order,3\n"));
    assert!(text.contains("kt_rank,2\n"));
    assert!(text.contains("shape_in,2 3 4\n"));
    assert!(text.contains("stored_scalars,"));

    let bytes = std::fs::read(&path).unwrap();
    std::fs::write(&path, &bytes[..bytes.len() - 3]).unwrap();
    assert_eq!(kcp(&["inspect-weight", p]).status.code(), Some(1));
}

#[test]
fn timing_small_grid() {
    let o = kcp(&[
        "timing",
        "--grid",
        "2,3",
        "--repeats",
        "1",
        "--workers",
        "2",
        "--shape",
        "ucf11",
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let out = stdout(&o);
    assert_eq!(
        out.lines().next(),
        Some("shape,c,serial_ms,parallel_ms,speedup")
    );
    assert_eq!(out.lines().count(), 3);
}

#[test]
fn usage_errors_exit_two() {
    assert_eq!(kcp(&["no-such-command"]).status.code(), Some(2));
    assert_eq!(kcp(&["init-weight", "--out", "x"]).status.code(), Some(2));
    assert_eq!(kcp(&["verify", "--workers", "0"]).status.code(), Some(2));
    assert_eq!(kcp(&["timing", "--shape", "ucf101"]).status.code(), Some(2));
    assert_eq!(
        kcp(&[
            "tables",
            "--shape-in",
            "2,2",
            "--shape-out",
            "2",
            "--ranks",
            "1,1,1"
        ])
        .status
        .code(),
        Some(2)
    );
}
