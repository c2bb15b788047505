use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use erprobe::config::ExperimentConfig;
use erprobe::protocol::build_counting_schedule;
use erprobe::seed::{self, Stream};
use erprobe::signal::read_recording;
use erprobe::sim::synthesize_recording;

fn erprobe(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_erprobe"))
        .args(args)
        .env_remove("RUST_BACKTRACE")
        .output()
        .expect("binary runs")
}

fn ok(args: &[&str]) -> String {
    let out = erprobe(args);
    assert!(
        out.status.success(),
        "{args:?} failed:\n{}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn video_schedule_has_180_rows() {
    let dir = tempfile::tempdir().unwrap();
    ok(&["schedule", "--kind", "video", "--duration", "900", "--seed", "7", "--out", s(dir.path())]);
    let text = fs::read_to_string(dir.path().join("video_schedule.csv")).unwrap();
    assert_eq!(text.lines().count(), 181);
    assert_eq!(text.lines().filter(|l| l.contains(",target,")).count(), 45);
}

#[test]
fn counting_schedule_is_reproducible() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    for d in [&a, &b] {
        ok(&["--seed", "1", "--out", s(d.path()), "schedule", "--kind", "counting"]);
    }
    let read = |d: &tempfile::TempDir| fs::read(d.path().join("counting_schedule.csv")).unwrap();
    assert_eq!(read(&a), read(&b));
    let c = tempfile::tempdir().unwrap();
    ok(&["--seed", "2", "--out", s(c.path()), "schedule", "--kind", "counting"]);
    assert_ne!(read(&a), read(&c));
}

#[test]
fn missing_kind_is_a_usage_error() {
    let out = erprobe(&["schedule"]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("--kind"));
}

#[test]
fn unwritable_output_fails() {
    let dir = tempfile::tempdir().unwrap();
    let file = dir.path().join("plain-file");
    fs::write(&file, "not a directory").unwrap();
    let out = erprobe(&["--out", s(&file.join("sub")), "simulate", "--subjects", "1"]);
    assert!(!out.status.success());
    assert!(!out.stderr.is_empty());
}

#[test]
fn noiseless_simulation_is_the_clean_response_sum() {
    let dir = tempfile::tempdir().unwrap();
    ok(&["--seed", "3", "--out", s(dir.path()), "simulate", "--subjects", "1", "--noise", "0"]);
    let subject = dir.path().join("subject_000");
    let mut names: Vec<String> = fs::read_dir(&subject)
        .unwrap()
        .map(|e| e.unwrap().file_name().into_string().unwrap())
        .collect();
    names.sort();
    assert_eq!(
        names,
        ["counting.csv", "counting.f32", "counting.hdr", "profile.toml", "video.csv", "video.f32", "video.hdr"]
    );

    let mut cfg = ExperimentConfig::default();
    cfg.subjects.noise_std_uv = 0.0;
    let channels = &cfg.pipeline.preprocess.channels;
    let profile = cfg.subjects.sample(channels, seed::derive(3, 0, Stream::Profile)).unwrap();
    assert_eq!(profile.noise_std_uv, 0.0);
    let schedule = build_counting_schedule(seed::derive(3, 0, Stream::CountingSchedule), 0.25, (0.25, 0.375)).unwrap();
    let clean = synthesize_recording(&schedule, &profile, cfg.fs, channels, seed::derive(3, 0, Stream::CountingRecording)).unwrap();

    let stored = read_recording(&subject.join("counting.hdr")).unwrap();
    assert_eq!(stored.samples.dim(), clean.samples.dim());
    for (a, b) in stored.samples.iter().zip(clean.samples.iter()) {
        assert_eq!(*a, *b as f32 as f64);
    }
    // Nothing but responses: the first 0.25 s precede every stimulus.
    assert!(stored.samples.column(0).iter().all(|&v| v == 0.0));
    assert!(stored.samples.iter().any(|&v| v != 0.0));
}

/// Simulates one subject and trains on its counting session.
fn trained_subject(dir: &Path) -> String {
    ok(&["--seed", "5", "--out", s(&dir.join("sim")), "simulate", "--subjects", "1", "--noise", "4"]);
    let subject = dir.join("sim/subject_000");
    ok(&[
        "--out",
        s(&dir.join("model")),
        "train",
        "--recording",
        s(&subject.join("counting.hdr")),
        "--schedule",
        s(&subject.join("counting.csv")),
        "--target",
        "1",
    ])
}

#[test]
fn train_then_probe() {
    let dir = tempfile::tempdir().unwrap();
    let log = trained_subject(dir.path());
    let lls: Vec<f64> = log
        .lines()
        .filter(|l| l.starts_with("round"))
        .map(|l| l.split_whitespace().last().unwrap().parse().unwrap())
        .collect();
    assert_eq!(lls.len(), 11);
    assert!(lls.windows(2).all(|w| w[1] >= w[0]));

    let model = dir.path().join("model/model.txt");
    let text = fs::read_to_string(&model).unwrap();
    assert!(text.lines().any(|l| l == "feature_dim 2456"));

    let subject = dir.path().join("sim/subject_000");
    let (probe_dir, video_hdr, video_csv) = (dir.path().join("probe"), subject.join("video.hdr"), subject.join("video.csv"));
    let probe = |extra: &[&str]| {
        let mut args = vec![
            "--out",
            s(&probe_dir),
            "probe",
            "--model",
            s(&model),
            "--recording",
            s(&video_hdr),
            "--schedule",
            s(&video_csv),
        ];
        args.extend(extra);
        ok(&args)
    };
    let targeted = probe(&["--mode", "targeted", "--threshold", "0"]);
    assert!(targeted.contains("ACCEPT target"), "{targeted}");
    for id in ["blank", "contrast", "target"] {
        assert!(targeted.lines().any(|l| l.trim_start().starts_with(id) && l.contains("mean")));
    }
    let report = fs::read_to_string(dir.path().join("probe/probe_report.json")).unwrap();
    assert!(report.contains("\"predicted\": \"target\""));

    let agnostic = probe(&["--mode", "agnostic", "--threshold", "1000"]);
    assert!(agnostic.contains("no relevant stimulus"), "{agnostic}");

    let rejected = probe(&["--mode", "targeted", "--target", "contrast", "--threshold", "0"]);
    assert!(rejected.contains("REJECT contrast"), "{rejected}");
    let lenient = probe(&["--mode", "targeted", "--target", "contrast", "--threshold", "-1000"]);
    assert!(lenient.contains("ACCEPT contrast"), "{lenient}");

    // Different preprocessing means a different feature layout.
    let cfg = dir.path().join("other.toml");
    fs::write(&cfg, "[pipeline.preprocess]\ndecimation = 2\n").unwrap();
    let out = erprobe(&[
        "--config",
        s(&cfg),
        "--out",
        s(&dir.path().join("probe")),
        "probe",
        "--model",
        s(&model),
        "--recording",
        s(&subject.join("video.hdr")),
        "--schedule",
        s(&subject.join("video.csv")),
    ]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("fingerprint"));
}

#[test]
fn absent_target_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    ok(&["--seed", "6", "--out", s(dir.path()), "simulate", "--subjects", "1"]);
    let subject = dir.path().join("subject_000");
    let out = erprobe(&[
        "--out",
        s(dir.path()),
        "train",
        "--recording",
        s(&subject.join("counting.hdr")),
        "--schedule",
        s(&subject.join("counting.csv")),
        "--target",
        "99",
    ]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("99"));
    assert!(!dir.path().join("model.txt").exists());
}

fn sweep_rows(path: &Path) -> Vec<(f64, usize, usize)> {
    let text = fs::read_to_string(path).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("threshold,accepted_correct,accepted_wrong,n_subjects"));
    lines
        .map(|l| {
            let f: Vec<&str> = l.split(',').collect();
            (f[0].parse().unwrap(), f[1].parse().unwrap(), f[2].parse().unwrap())
        })
        .collect()
}

#[test]
fn cohort_report_and_sweep() {
    let dir = tempfile::tempdir().unwrap();
    let stdout = ok(&["--seed", "11", "--out", s(dir.path()), "cohort", "--subjects", "27"]);
    assert!(stdout.contains("accuracy"));
    let report: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("cohort_report.json")).unwrap()).unwrap();
    assert_eq!(report["subjects"].as_array().unwrap().len(), 27);
    assert!(report["accuracy"].as_f64().unwrap() > 0.5);

    let rows = sweep_rows(&dir.path().join("sweep.csv"));
    assert_eq!(rows.len(), 41);
    assert!(rows.windows(2).all(|w| w[1].1 <= w[0].1 && w[1].2 <= w[0].2));

    let sweep_dir = dir.path().join("resweep");
    ok(&[
        "--out",
        s(&sweep_dir),
        "sweep",
        "--report",
        s(&dir.path().join("cohort_report.json")),
        "--mode",
        "targeted",
        "--grid-min",
        "-1",
        "--grid-max",
        "1",
        "--grid-points",
        "5",
    ]);
    let rows = sweep_rows(&sweep_dir.join("sweep.csv"));
    assert_eq!(rows.iter().map(|r| r.0).collect::<Vec<_>>(), [-1.0, -0.5, 0.0, 0.5, 1.0]);
    assert_eq!(rows[0].1 + rows[0].2, 27);
}

#[test]
fn face_trained_variant_runs() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    for d in [&a, &b] {
        ok(&["--seed", "12", "--out", s(d.path()), "cohort", "--subjects", "2", "--variant", "face-trained"]);
    }
    let read = |d: &tempfile::TempDir| fs::read(d.path().join("cohort_report.json")).unwrap();
    assert_eq!(read(&a), read(&b));
    assert!(String::from_utf8(read(&a)).unwrap().contains("\"variant\": \"face-trained\""));
}
