use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn sbtrack(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_sbtrack")).args(args).output().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

/// Writes a small straight-tube phantom and returns its config path.
fn phantom(dir: &Path) -> String {
    let spec = dir.join("spec.txt");
    fs::write(&spec, "dims: 64 40 40\nbends: 0\nnoise_sigma: 0\n").unwrap();
    let out = dir.join("ph");
    let o = sbtrack(&["phantom", "--spec", spec.to_str().unwrap(), "-o", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    out.join("track.cfg").to_str().unwrap().to_owned()
}

#[test]
fn phantom_track_eval_round() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = phantom(dir.path());
    let o = sbtrack(&["track", "-c", &cfg]);
    assert!(o.status.success(), "{}", stderr(&o));
    let text = stdout(&o);
    assert!(text.contains("0 straight legs"), "{text}");
    let out = dir.path().join("ph/out");
    for f in ["wall_map.vol", "labels.vol", "rag.txt", "must_pass.txt", "route.txt", "diagnostics.txt", "metrics.txt"] {
        assert!(out.join(f).is_file(), "{f} missing");
    }

    let gt = dir.path().join("ph/gt_path.txt");
    let report = dir.path().join("self.txt");
    let o = sbtrack(&["eval", "--pred", gt.to_str().unwrap(), "--gt", gt.to_str().unwrap(), "-o", report.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    let text = stdout(&o);
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("Precision (%) | Recall (%) | Curve-to-curve (mm) | Max. len. w/o error (mm)"));
    let row: Vec<&str> = lines.next().unwrap().split(" | ").collect();
    assert_eq!(row.len(), 4);
    assert_eq!(&row[..3], &["100.0", "100.0", "0.00"]);
    let full: f64 = row[3].parse().unwrap();
    let gt_len = fs::read_to_string(&report).unwrap();
    assert!(gt_len.contains(&format!("gt_length_mm: {full}")), "{gt_len}");
    assert!(lines.next().unwrap().starts_with("metrics precision_pct=100"));
}

#[test]
fn reruns_are_bitwise_identical() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = phantom(dir.path());
    let route = dir.path().join("ph/out/route.txt");
    assert!(sbtrack(&["track", "-c", &cfg, "--seed", "3"]).status.success());
    let first = fs::read(&route).unwrap();
    assert!(sbtrack(&["--threads", "2", "track", "-c", &cfg, "--seed", "3"]).status.success());
    assert_eq!(fs::read(&route).unwrap(), first);
    assert!(sbtrack(&["track", "-c", &cfg, "--seed", "3", "--resume"]).status.success());
    assert_eq!(fs::read(&route).unwrap(), first);
}

#[test]
fn stage_commands_stop_early() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = phantom(dir.path());
    let out = dir.path().join("ph/out");
    assert!(sbtrack(&["ridge", "-c", &cfg]).status.success());
    assert!(out.join("wall_map.vol").is_file() && !out.join("labels.vol").exists());
    assert!(sbtrack(&["sample", "-c", &cfg]).status.success());
    assert!(out.join("must_pass.txt").is_file() && !out.join("route.txt").exists());
    let o = sbtrack(&["baseline", "-c", &cfg]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(out.join("baseline_route.txt").is_file());
}

#[test]
fn exit_codes_follow_error_classes() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = phantom(dir.path());

    let o = sbtrack(&["track", "-c", &cfg, "--delta", "3"]);
    assert_eq!(o.status.code(), Some(2), "{}", stderr(&o));
    let o = sbtrack(&["track", "--start", "0,0,0"]);
    assert_eq!(o.status.code(), Some(2), "{}", stderr(&o));

    let missing = dir.path().join("nope.txt");
    let o = sbtrack(&["eval", "--pred", missing.to_str().unwrap(), "--gt", missing.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(3), "{}", stderr(&o));

    let o = sbtrack(&["track", "-c", &cfg, "--start", "1,1,1"]);
    assert_eq!(o.status.code(), Some(4), "{}", stderr(&o));
    assert!(stderr(&o).contains("start node pruned"), "{}", stderr(&o));
}

#[test]
fn help_marks_local_defaults() {
    let o = sbtrack(&["track", "--help"]);
    let text = stdout(&o);
    assert!(text.contains("decision"), "{text}");
    let o = sbtrack(&["--help"]);
    assert!(stdout(&o).contains("wall_threshold"));
}
