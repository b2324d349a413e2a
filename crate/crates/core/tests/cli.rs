use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use fsq_core::io::load_fibers;
use fsq_core::scene::load_scene;

fn fsq(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_fsq"))
        .args(args)
        .env_remove("FSQ_CACHE_DIR")
        .output()
        .expect("spawn fsq")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

fn queries() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../queries")
}

fn phantom(dir: &Path, extra: &[&str]) {
    let mut args = vec!["phantom", "--seed", "42", "--out", p(dir)];
    args.extend_from_slice(extra);
    let o = fsq(&args);
    assert!(o.status.success(), "{}", stderr(&o));
}

fn filter(dir: &Path, extra: &[&str]) -> Output {
    let mut args = vec![
        "filter".to_owned(),
        "--scene".into(),
        p(&dir.join("phantom.scene")).into(),
        "--query".into(),
        p(&dir.join("phantom.fq")).into(),
        "--fibers".into(),
        p(&dir.join("fibers.fib")).into(),
        "--out".into(),
        p(&dir.join("kept.fib")).into(),
        "--scores".into(),
        p(&dir.join("scores.tsv")).into(),
        "--no-cache".into(),
    ];
    args.extend(extra.iter().map(|s| s.to_string()));
    fsq(&args.iter().map(String::as_str).collect::<Vec<_>>())
}

#[test]
fn parse_reports_nine_clauses_for_l5() {
    let o = fsq(&["parse", p(&queries().join("L5.fq"))]);
    assert!(o.status.success());
    let out = stdout(&o);
    assert!(out.starts_with("# 9 clauses\ncrossing(VertebralCanalL5)\n"), "{out}");
}

#[test]
fn parse_error_exits_2_with_position() {
    let dir = tempfile::tempdir().unwrap();
    let q = dir.path().join("bad.fq");
    fs::write(&q, "crossing(A)\nthen anterior_of(B, aperture=)\n").unwrap();
    let o = fsq(&["parse", p(&q)]);
    assert_eq!(o.status.code(), Some(2));
    let err = stderr(&o);
    assert!(err.contains(&format!("{}:2:", q.display())), "{err}");
    assert!(stdout(&o).is_empty());
}

#[test]
fn missing_scene_exits_1() {
    let dir = tempfile::tempdir().unwrap();
    let o = fsq(&[
        "landscape",
        "--scene",
        p(&dir.path().join("absent.scene")),
        "--structure",
        "A",
        "--relation",
        "anterior_of",
        "--out",
        p(&dir.path().join("x.fvol")),
    ]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("absent.scene"));
}

#[test]
fn filter_writes_one_row_per_fiber_and_keeps_originals() {
    let dir = tempfile::tempdir().unwrap();
    phantom(dir.path(), &[]);
    let o = filter(dir.path(), &[]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(stdout(&o).contains("accepted 20 of 50"), "{}", stdout(&o));

    let scores = fs::read_to_string(dir.path().join("scores.tsv")).unwrap();
    let mut lines = scores.lines();
    assert_eq!(lines.next(), Some("fiber_id\tdegree\taccepted\tclause_degrees"));
    let rows: Vec<&str> = lines.collect();
    assert_eq!(rows.len(), 50);
    for r in &rows {
        assert_eq!(r.split('\t').nth(3).unwrap().split(',').count(), 3, "{r}");
    }

    let all = load_fibers(dir.path().join("fibers.fib")).unwrap();
    let kept = load_fibers(dir.path().join("kept.fib")).unwrap();
    assert_eq!(kept.len(), 20);
    for f in kept.fibers() {
        let orig = all.fibers().iter().find(|g| g.id() == f.id()).unwrap();
        assert_eq!(f.len(), orig.len());
        for (a, b) in f.points().iter().zip(orig.points()) {
            for k in 0..3 {
                assert!((a[k] - b[k]).abs() < 1e-5);
            }
        }
    }
}

#[test]
fn zero_accepted_still_succeeds() {
    let dir = tempfile::tempdir().unwrap();
    phantom(dir.path(), &[]);
    let o = filter(dir.path(), &["--threshold", "1.0"]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(stdout(&o).contains("accepted 0 of 50"), "{}", stdout(&o));
    assert_eq!(load_fibers(dir.path().join("kept.fib")).map(|f| f.len()).unwrap_or(0), 0);
}

#[test]
fn threshold_precedence() {
    let dir = tempfile::tempdir().unwrap();
    phantom(dir.path(), &[]);
    let scene = dir.path().join("phantom.scene");
    let mut text = fs::read_to_string(&scene).unwrap();
    text.push_str("default threshold 0.7\n");
    fs::write(&scene, text).unwrap();
    let o = filter(dir.path(), &[]);
    assert!(stdout(&o).contains("(threshold 0.7)"), "{}", stdout(&o));

    let q = dir.path().join("phantom.fq");
    let query = fs::read_to_string(&q).unwrap();
    fs::write(&q, format!("@threshold 0.6\n{query}")).unwrap();
    let o = filter(dir.path(), &[]);
    assert!(stdout(&o).contains("(threshold 0.6)"), "{}", stdout(&o));

    let o = filter(dir.path(), &["--threshold", "0.4"]);
    assert!(stdout(&o).contains("(threshold 0.4)"), "{}", stdout(&o));
}

#[test]
fn landscape_cache_hit_gives_identical_bytes() {
    let dir = tempfile::tempdir().unwrap();
    phantom(dir.path(), &[]);
    let cache = dir.path().join("cache");
    let run = |out: &Path| {
        fsq(&[
            "landscape",
            "--scene",
            p(&dir.path().join("phantom.scene")),
            "--structure",
            "MuscleA",
            "--relation",
            "anterior_of",
            "--aperture",
            "60",
            "--out",
            p(out),
            "--cache-dir",
            p(&cache),
        ])
    };
    let first = run(&dir.path().join("a.fvol"));
    assert!(first.status.success(), "{}", stderr(&first));
    assert!(stdout(&first).starts_with("computed"));
    let second = run(&dir.path().join("b.fvol"));
    assert!(stdout(&second).starts_with("cache hit"), "{}", stdout(&second));
    assert_eq!(
        fs::read(dir.path().join("a.fvol")).unwrap(),
        fs::read(dir.path().join("b.fvol")).unwrap()
    );
}

#[test]
fn landscape_rejects_bad_parameters() {
    let dir = tempfile::tempdir().unwrap();
    phantom(dir.path(), &[]);
    let o = fsq(&[
        "landscape",
        "--scene",
        p(&dir.path().join("phantom.scene")),
        "--structure",
        "Canal",
        "--relation",
        "crossing",
        "--aperture",
        "30",
        "--out",
        p(&dir.path().join("x.fvol")),
    ]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("aperture"), "{}", stderr(&o));
}

#[test]
fn phantom_scene_binds_four_structures() {
    let dir = tempfile::tempdir().unwrap();
    phantom(dir.path(), &[]);
    let scene = load_scene(dir.path().join("phantom.scene")).unwrap();
    let names: Vec<&str> = scene.names().collect();
    assert_eq!(names, ["Canal", "MuscleA", "MuscleB", "CanalHole"]);
}

#[test]
fn ten_thousand_fiber_phantom_loads() {
    let dir = tempfile::tempdir().unwrap();
    phantom(dir.path(), &["--positives", "4000", "--decoys", "6000"]);
    assert_eq!(load_fibers(dir.path().join("fibers.fib")).unwrap().len(), 10_000);
    let truth = fs::read_to_string(dir.path().join("ground_truth.tsv")).unwrap();
    assert_eq!(truth.lines().count(), 10_001);
}
