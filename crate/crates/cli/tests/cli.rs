use std::path::Path;
use std::process::{Command, Output};

use semilocal::eval::MetricsReport;
use semilocal::io;

const BIN: &str = env!("CARGO_BIN_EXE_semilocal");

fn sl(dir: &Path, args: &[&str]) -> Output {
    Command::new(BIN).args(args).current_dir(dir).output().expect("binary runs")
}

fn ok(out: &Output) {
    assert!(
        out.status.success(),
        "exit {:?}\nstdout: {}\nstderr: {}",
        out.status.code(),
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr)
    );
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn files(dir: &Path) -> Vec<String> {
    let mut v: Vec<String> = std::fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().file_name().to_string_lossy().into_owned())
        .collect();
    v.sort();
    v
}

#[test]
fn simulate_is_byte_identical_per_seed() {
    let d = tempfile::tempdir().unwrap();
    ok(&sl(d.path(), &["simulate", "--preset", "easy", "--seed", "7", "--out", "a"]));
    ok(&sl(d.path(), &["simulate", "--preset", "easy", "--seed", "7", "--out", "b"]));
    ok(&sl(d.path(), &["simulate", "--preset", "easy", "--seed", "8", "--out", "c"]));
    let read = |n: &str| std::fs::read(d.path().join(n)).unwrap();
    assert_eq!(read("a.rec"), read("b.rec"));
    assert_eq!(read("a.truth"), read("b.truth"));
    assert_ne!(read("a.rec"), read("c.rec"));
}

#[test]
fn run_and_stream_at_rate_zero_agree() {
    let d = tempfile::tempdir().unwrap();
    ok(&sl(d.path(), &["simulate", "--preset", "uncontrolled", "--seed", "2", "--out", "u"]));
    ok(&sl(d.path(), &["run", "--rec", "u.rec", "--out", "r"]));
    let s = sl(d.path(), &["stream", "--rec", "u.rec", "--rate", "0", "--out", "s"]);
    ok(&s);
    let read = |n: &str| std::fs::read(d.path().join(n)).unwrap();
    assert_eq!(read("r.alerts"), read("s.alerts"));
    assert_eq!(read("r.pred"), read("s.pred"));
    let (_, events) = io::read_alerts(&d.path().join("s.alerts")).unwrap();
    let printed = stdout(&s).lines().filter(|l| l.starts_with("t=")).count();
    assert_eq!(printed, events.len());
    assert!(stdout(&s).contains("p99"));
}

#[test]
fn budget_violation_exits_3() {
    let d = tempfile::tempdir().unwrap();
    ok(&sl(d.path(), &["simulate", "--preset", "easy", "--duration", "1", "--out", "e"]));
    let out = sl(
        d.path(),
        &["stream", "--rec", "e.rec", "--rate", "0", "--budget-ms", "5", "--slowdown-ms", "8", "--out", "s"],
    );
    assert_eq!(out.status.code(), Some(3), "{}", stderr(&out));
    assert!(stderr(&out).contains("budget"));
    let (_, samples) = io::read_latency(&d.path().join("s.latency")).unwrap();
    assert_eq!(samples.len(), 30);
    assert!(samples.iter().all(|s| s.ms >= 8.0));

    let fine = sl(d.path(), &["stream", "--rec", "e.rec", "--rate", "0", "--budget-ms", "1000", "--out", "t"]);
    ok(&fine);
}

#[test]
fn inspect_reports_frames() {
    let d = tempfile::tempdir().unwrap();
    ok(&sl(d.path(), &["simulate", "--preset", "easy", "--duration", "60", "--out", "e"]));
    let out = sl(d.path(), &["inspect", "--rec", "e.rec"]);
    ok(&out);
    let text = stdout(&out);
    assert!(text.lines().any(|l| l.starts_with("frames") && l.ends_with(" 1800")), "{text}");
    assert!(text.contains("60.000 s"));
    assert!(text.contains("easy"));
    assert!(text.contains("tracks (estimate)"));
}

#[test]
fn inspect_header_only_file() {
    let d = tempfile::tempdir().unwrap();
    ok(&sl(d.path(), &["simulate", "--preset", "easy", "--duration", "1", "--out", "e"]));
    let text = std::fs::read_to_string(d.path().join("e.rec")).unwrap();
    let header = text.lines().next().unwrap();
    std::fs::write(d.path().join("h.rec"), format!("{header}\n")).unwrap();
    let out = sl(d.path(), &["inspect", "--rec", "h.rec"]);
    ok(&out);
    assert!(stdout(&out).lines().any(|l| l.starts_with("frames") && l.ends_with(" 0")));
}

#[test]
fn inspect_corrupted_file_names_the_line() {
    let d = tempfile::tempdir().unwrap();
    ok(&sl(d.path(), &["simulate", "--preset", "easy", "--duration", "1", "--out", "e"]));
    let text = std::fs::read_to_string(d.path().join("e.rec")).unwrap();
    let mut lines: Vec<String> = text.lines().map(String::from).collect();
    lines[5] = "{\"type\":\"frame\",\"frame\":4,".into();
    std::fs::write(d.path().join("bad.rec"), lines.join("\n") + "\n").unwrap();
    let out = sl(d.path(), &["inspect", "--rec", "bad.rec"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("line 6"), "{}", stderr(&out));

    // cut mid-line: the last line has no terminator
    std::fs::write(d.path().join("cut.rec"), &text[..text.len() - 10]).unwrap();
    let out = sl(d.path(), &["inspect", "--rec", "cut.rec"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains(&format!("line {}", text.lines().count())), "{}", stderr(&out));
}

#[test]
fn missing_input_leaves_no_outputs() {
    let d = tempfile::tempdir().unwrap();
    let out = sl(d.path(), &["run", "--rec", "absent.rec", "--out", "x"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(files(d.path()).is_empty(), "{:?}", files(d.path()));
    let out = sl(d.path(), &["eval", "--alerts", "a", "--truth", "b", "--pred", "c", "--out", "m"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(files(d.path()).is_empty());
}

#[test]
fn usage_errors_exit_1() {
    let d = tempfile::tempdir().unwrap();
    let out = sl(d.path(), &["simulate", "--preset", "extreme"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("preset"));
    assert_eq!(sl(d.path(), &["frobnicate"]).status.code(), Some(1));
    assert_eq!(sl(d.path(), &["run"]).status.code(), Some(1));
    assert_eq!(sl(d.path(), &["--set", "radius=-1", "simulate"]).status.code(), Some(1));
    assert_eq!(sl(d.path(), &["--set", "no_such_key=1", "simulate"]).status.code(), Some(1));
    assert!(files(d.path()).is_empty());
}

#[test]
fn uncontrolled_minute_has_collisions() {
    let d = tempfile::tempdir().unwrap();
    ok(&sl(d.path(), &["simulate", "--preset", "uncontrolled", "--duration", "60", "--out", "u"]));
    let (_, truth) = io::read_truth(&d.path().join("u.truth")).unwrap();
    assert!(!truth.intervals.is_empty());
}

#[test]
fn eval_report_is_schema_complete() {
    let d = tempfile::tempdir().unwrap();
    ok(&sl(d.path(), &["simulate", "--preset", "easy", "--seed", "3", "--noiseless", "--out", "e"]));
    ok(&sl(d.path(), &["stream", "--rec", "e.rec", "--rate", "0", "--out", "e"]));
    ok(&sl(
        d.path(),
        &[
            "eval", "--alerts", "e.alerts", "--truth", "e.truth", "--pred", "e.pred", "--latency", "e.latency", "--plot",
            "e.plot", "--out", "e.metrics",
        ],
    ));
    let raw: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(d.path().join("e.metrics")).unwrap()).unwrap();
    let obj = raw.as_object().unwrap();
    for key in MetricsReport::KEYS {
        assert!(obj.contains_key(key), "missing {key}");
    }
    assert_eq!(obj.len(), MetricsReport::KEYS.len());
    let m = io::read_metrics(&d.path().join("e.metrics")).unwrap();
    assert_eq!((m.precision, m.recall), (Some(1.0), Some(1.0)));
    assert!(m.equivalence_residual_max.unwrap() < 1e-6);
    assert!(m.latency_p99_ms.is_some());
    let plot = std::fs::read_to_string(d.path().join("e.plot")).unwrap();
    assert!(plot.lines().count() >= 2);
    for line in plot.lines() {
        let v: serde_json::Value = serde_json::from_str(line).unwrap();
        assert_eq!(v["type"], "plot");
    }
}

#[test]
fn receding_pedestrians_raise_no_alerts() {
    let d = tempfile::tempdir().unwrap();
    let spec = serde_json::json!({
        "preset": "custom",
        "duration": 20.0,
        "seed": 4,
        "ego": {
            "speed": 0.8,
            "waypoints": [[0.0, 0.0], [100.0, 0.0]],
            "head_yaw_amplitude_deg": 5.0,
            "head_yaw_frequency_hz": 0.2
        },
        "pedestrians": [
            {"spawn_time": 0.0, "start": [4.0, 0.2], "velocity": [1.6, 0.0]},
            {"spawn_time": 0.0, "start": [5.0, -1.5], "velocity": [1.5, -0.3]},
            {"spawn_time": 2.0, "start": [7.0, 1.0], "velocity": [1.4, 0.4]}
        ]
    });
    std::fs::write(d.path().join("recede.json"), spec.to_string()).unwrap();
    ok(&sl(d.path(), &["simulate", "--spec", "recede.json", "--out", "r"]));
    let (_, truth) = io::read_truth(&d.path().join("r.truth")).unwrap();
    assert!(truth.intervals.is_empty());
    let run = sl(d.path(), &["run", "--rec", "r.rec"]);
    ok(&run);
    let (_, events) = io::read_alerts(&d.path().join("r.alerts")).unwrap();
    assert!(events.is_empty(), "{events:?}");
    let (_, pred) = io::read_pred(&d.path().join("r.pred")).unwrap();
    assert!(pred.iter().any(|l| matches!(l, io::PredLine::Prediction(_))));
}

#[test]
fn head_on_alert_precedes_the_collision() {
    let d = tempfile::tempdir().unwrap();
    ok(&sl(d.path(), &["simulate", "--preset", "easy", "--seed", "11", "--noiseless", "--out", "e"]));
    ok(&sl(d.path(), &["run", "--rec", "e.rec"]));
    let (_, truth) = io::read_truth(&d.path().join("e.truth")).unwrap();
    let (_, events) = io::read_alerts(&d.path().join("e.alerts")).unwrap();
    let first = truth.intervals.first().expect("head-on interval").start_t;
    assert!(events.iter().any(|e| e.kind == semilocal::AlertKind::Alert && e.t < first));
}

#[test]
fn config_file_and_overrides() {
    let d = tempfile::tempdir().unwrap();
    std::fs::write(d.path().join("c.cfg"), "preset = \"hard\"\nseed = 5\nduration = 2.0\nout = \"fromcfg\"\n").unwrap();
    ok(&sl(d.path(), &["--config", "c.cfg", "simulate"]));
    ok(&sl(d.path(), &["--config", "c.cfg", "--set", "seed=6", "simulate", "--out", "flag"]));
    let (h5, f5) = io::read_recording(&d.path().join("fromcfg.rec")).unwrap();
    let (h6, _) = io::read_recording(&d.path().join("flag.rec")).unwrap();
    assert_eq!((h5.metadata.preset.as_str(), h5.metadata.seed, f5.len()), ("hard", 5, 60));
    assert_eq!(h6.metadata.seed, 6);

    std::fs::write(d.path().join("bad.cfg"), "radiuss = 1\n").unwrap();
    let out = sl(d.path(), &["--config", "bad.cfg", "simulate"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("radiuss"));
}
