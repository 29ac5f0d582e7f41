use std::path::Path;
use std::process::{Command, Output};

fn bgsweep(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_bgsweep"))
        .args(args)
        .output()
        .expect("spawn bgsweep")
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn synth(dir: &Path) {
    let out = bgsweep(&[
        "synth", "--width", "48", "--height", "40", "--frames", "12", "--square", "8", "--seed", "4", "--out",
        s(dir),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
}

fn read_csv(path: &Path) -> (csv::StringRecord, Vec<csv::StringRecord>) {
    let mut r = csv::Reader::from_path(path).unwrap();
    let header = r.headers().unwrap().clone();
    let rows = r.records().map(|x| x.unwrap()).collect();
    (header, rows)
}

#[test]
fn synth_then_sweep() {
    let dir = tempfile::tempdir().unwrap();
    let seq = dir.path().join("seq");
    synth(&seq);
    assert!(seq.join("input/in000012.pgm").is_file());
    assert!(seq.join("groundtruth/gt000001.pgm").is_file());

    let csv_path = dir.path().join("sweep.csv");
    let out = bgsweep(&[
        "sweep",
        "--input",
        s(&seq.join("input")),
        "--gt",
        s(&seq.join("groundtruth")),
        "--method",
        "gmm",
        "--ratios",
        "0..60:20",
        "--repeats",
        "2",
        "--out",
        s(&csv_path),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let (header, rows) = read_csv(&csv_path);
    assert_eq!(header.len(), 17);
    assert_eq!(rows.len(), 4);
    assert_eq!(rows.iter().map(|r| r[2].to_string()).collect::<Vec<_>>(), ["0", "20", "40", "60"]);
    assert!(rows.iter().all(|r| &r[0] == "seq" && &r[1] == "gmm" && &r[3] == "11"));
    assert_eq!(&rows[0][16], "1.000000");
}

#[test]
fn run_dump_and_rescore_agree() {
    let dir = tempfile::tempdir().unwrap();
    let seq = dir.path().join("seq");
    synth(&seq);
    let masks = dir.path().join("masks");
    let run_csv = dir.path().join("run.csv");
    let out = bgsweep(&[
        "run",
        "--input",
        s(&seq.join("input")),
        "--gt",
        s(&seq.join("groundtruth")),
        "--method",
        "vibe",
        "--seed",
        "9",
        "--ratio",
        "30",
        "--dump-masks",
        s(&masks),
        "--out",
        s(&run_csv),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let (_, run_rows) = read_csv(&run_csv);
    assert_eq!(run_rows.len(), 1);
    assert_eq!(&run_rows[0][2], "30");

    let score_csv = dir.path().join("score.csv");
    let out = bgsweep(&[
        "score",
        "--pred",
        s(&masks.join("ratio_30")),
        "--gt",
        s(&seq.join("groundtruth")),
        "--out",
        s(&score_csv),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let (header, rows) = read_csv(&score_csv);
    assert_eq!(&header[0], "frame");
    assert_eq!(rows.len(), 12);
    let total = rows.last().unwrap();
    assert_eq!(&total[0], "total");
    // tp, tn, fp, fn agree with the run's own scoring
    for (score_col, run_col) in [(1, 4), (2, 5), (3, 6), (4, 7)] {
        assert_eq!(&total[score_col], &run_rows[0][run_col]);
    }
}

#[test]
fn bad_ratio_fails_with_stage() {
    let dir = tempfile::tempdir().unwrap();
    let out = bgsweep(&[
        "run", "--input", s(dir.path()), "--method", "gmm", "--ratio", "100", "--out", "x.csv",
    ]);
    assert!(!out.status.success());
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("parse arguments"), "{err}");
}

#[test]
fn missing_input_fails_with_stage() {
    let dir = tempfile::tempdir().unwrap();
    let out = bgsweep(&[
        "sweep",
        "--input",
        s(&dir.path().join("absent")),
        "--method",
        "vibe",
        "--ratios",
        "0,50",
        "--out",
        s(&dir.path().join("o.csv")),
    ]);
    assert!(!out.status.success());
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("sweep") && err.contains("missing sequence"), "{err}");
}

#[test]
fn untimed_parallel_sweep_leaves_cpu_empty() {
    let dir = tempfile::tempdir().unwrap();
    let seq = dir.path().join("seq");
    synth(&seq);
    let csv_path = dir.path().join("p.csv");
    let out = bgsweep(&[
        "sweep",
        "--input",
        s(&seq.join("input")),
        "--gt",
        s(&seq.join("groundtruth")),
        "--method",
        "vibe",
        "--ratios",
        "0,10,20",
        "--jobs",
        "3",
        "--no-timing",
        "--out",
        s(&csv_path),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let (_, rows) = read_csv(&csv_path);
    assert_eq!(rows.len(), 3);
    assert!(rows.iter().all(|r| r[11].is_empty() && r[16].is_empty()));
}
