use std::fs;
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use anyhow::{bail, ensure, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use erprobe::blr::{self, read_model, write_model};
use erprobe::config::ExperimentConfig;
use erprobe::probe::{self, CandidateScores, Decision, ProbeMode};
use erprobe::protocol::{self, build_counting_schedule, build_video_schedule, validate_schedule, SessionKind, StimulusSchedule};
use erprobe::seed::{self, Stream};
use erprobe::signal::{preprocess, preprocess_events, read_recording, write_recording};
use erprobe::sim::{self, run_cohort, CohortConfig, CohortReport, Variant};

#[derive(Parser, Debug)]
#[command(name = "erprobe", version, about = "Stimulus scheduling, ERP classification and relevance probing")]
struct Cli {
    /// Master seed; every random draw of the command derives from it.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Output directory.
    #[arg(long, global = true, default_value = ".")]
    out: PathBuf,
    /// TOML file overriding the default experiment configuration.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Generate a stimulus schedule CSV.
    Schedule(ScheduleArgs),
    /// Simulate subjects: one recording and schedule per session.
    Simulate(SimulateArgs),
    /// Train the boosted classifier on one recording.
    Train(TrainArgs),
    /// Score a recording's candidates with a trained model and decide.
    Probe(ProbeArgs),
    /// Run the full synthetic experiment over a cohort.
    Cohort(CohortArgs),
    /// Recompute a confidence-threshold sweep from a cohort report.
    Sweep(SweepArgs),
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Kind {
    Counting,
    Video,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Mode {
    Targeted,
    Agnostic,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum VariantArg {
    CountingTrained,
    FaceTrained,
}

impl From<VariantArg> for Variant {
    fn from(v: VariantArg) -> Self {
        match v {
            VariantArg::CountingTrained => Variant::CountingTrained,
            VariantArg::FaceTrained => Variant::FaceTrained,
        }
    }
}

#[derive(Args, Debug)]
struct ScheduleArgs {
    #[arg(long, value_enum)]
    kind: Kind,
    /// Video duration in seconds (video only).
    #[arg(long)]
    duration: Option<f64>,
}

#[derive(Args, Debug)]
struct SimulateArgs {
    #[arg(long, default_value_t = 1)]
    subjects: usize,
    /// Background noise standard deviation in µV, for every subject.
    #[arg(long)]
    noise: Option<f64>,
}

#[derive(Args, Debug)]
struct TrainArgs {
    /// Recording header file.
    #[arg(long)]
    recording: PathBuf,
    #[arg(long)]
    schedule: PathBuf,
    /// Candidate id labelled as the positive class.
    #[arg(long)]
    target: String,
    #[arg(long)]
    rounds: Option<usize>,
    #[arg(long)]
    ridge: Option<f64>,
    #[arg(long)]
    gamma_max: Option<f64>,
    /// Model file name inside the output directory.
    #[arg(long, default_value = "model.txt")]
    model_name: String,
}

#[derive(Args, Debug)]
struct ProbeArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    recording: PathBuf,
    #[arg(long)]
    schedule: PathBuf,
    #[arg(long, value_enum, default_value_t = Mode::Targeted)]
    mode: Mode,
    /// Hypothesis tested in targeted mode.
    #[arg(long, default_value = protocol::VIDEO_TARGET)]
    target: String,
    #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
    threshold: f64,
    /// Do not add blank reference epochs to a video schedule.
    #[arg(long)]
    no_blanks: bool,
}

#[derive(Args, Debug)]
struct CohortArgs {
    #[arg(long, default_value_t = 50)]
    subjects: usize,
    #[arg(long, value_enum, default_value_t = VariantArg::CountingTrained)]
    variant: VariantArg,
    /// Confidence used for the sweep.
    #[arg(long, value_enum, default_value_t = Mode::Agnostic)]
    mode: Mode,
}

#[derive(Args, Debug)]
struct SweepArgs {
    /// Cohort report JSON.
    #[arg(long)]
    report: PathBuf,
    #[arg(long, value_enum, default_value_t = Mode::Agnostic)]
    mode: Mode,
    #[arg(long, allow_negative_numbers = true, requires = "grid_max")]
    grid_min: Option<f64>,
    #[arg(long, allow_negative_numbers = true, requires = "grid_min")]
    grid_max: Option<f64>,
    #[arg(long)]
    grid_points: Option<usize>,
}

fn probe_mode(mode: Mode, target: &str) -> ProbeMode {
    match mode {
        Mode::Targeted => ProbeMode::Targeted(target.to_string()),
        Mode::Agnostic => ProbeMode::Agnostic,
    }
}

struct Ctx {
    seed: u64,
    out: PathBuf,
    config: ExperimentConfig,
}

impl Ctx {
    fn output(&self, name: impl AsRef<Path>) -> Result<PathBuf> {
        fs::create_dir_all(&self.out).with_context(|| format!("creating {}", self.out.display()))?;
        Ok(self.out.join(name))
    }
}

fn write_schedule(schedule: &StimulusSchedule, path: &Path) -> Result<()> {
    let file = fs::File::create(path).with_context(|| format!("creating {}", path.display()))?;
    schedule.write_csv(BufWriter::new(file))?;
    Ok(())
}

fn read_schedule(path: &Path) -> Result<StimulusSchedule> {
    let file = fs::File::open(path).with_context(|| format!("opening {}", path.display()))?;
    Ok(StimulusSchedule::read_csv(file, None)?)
}

fn cmd_schedule(ctx: &Ctx, args: &ScheduleArgs) -> Result<()> {
    let p = &ctx.config.protocol;
    let (schedule, name) = match args.kind {
        Kind::Counting => {
            ensure!(args.duration.is_none(), "--duration applies to video schedules only");
            let s = build_counting_schedule(ctx.seed, p.counting.stim_duration_s, p.counting.isi_range_s)?;
            (s, "counting_schedule.csv")
        }
        Kind::Video => {
            let duration = args.duration.unwrap_or(p.video.duration_s);
            (build_video_schedule(duration, p.video.period_s, p.video.stim_duration_s)?, "video_schedule.csv")
        }
    };
    let report = validate_schedule(&schedule);
    ensure!(report.is_valid(), "generated schedule is invalid: {:?}", report.violations);
    let path = ctx.output(name)?;
    write_schedule(&schedule, &path)?;
    println!("{} events, {:.3} s -> {}", schedule.events.len(), schedule.total_duration_s, path.display());
    Ok(())
}

fn cmd_simulate(ctx: &Ctx, args: &SimulateArgs) -> Result<()> {
    ensure!(args.subjects > 0, "--subjects must be at least 1");
    let mut config = ctx.config.clone();
    if let Some(noise) = args.noise {
        ensure!(noise >= 0.0, "--noise must be non-negative");
        config.subjects.noise_std_uv = noise;
    }
    let channels = &config.pipeline.preprocess.channels;
    let p = &config.protocol;
    for subject in 0..args.subjects {
        let idx = subject as u64;
        let dir = ctx.output(format!("subject_{subject:03}"))?;
        fs::create_dir_all(&dir).with_context(|| format!("creating {}", dir.display()))?;
        let profile = config.subjects.sample(channels, seed::derive(ctx.seed, idx, Stream::Profile))?;
        let video_profile = config
            .subjects
            .sample_video(&profile, seed::derive(ctx.seed, idx, Stream::VideoProfile))?;

        let sessions = [
            (
                SessionKind::Counting,
                build_counting_schedule(
                    seed::derive(ctx.seed, idx, Stream::CountingSchedule),
                    p.counting.stim_duration_s,
                    p.counting.isi_range_s,
                )?,
                &profile,
                Stream::CountingRecording,
            ),
            (
                SessionKind::Video,
                build_video_schedule(p.video.duration_s, p.video.period_s, p.video.stim_duration_s)?,
                &video_profile,
                Stream::VideoRecording,
            ),
        ];
        for (kind, schedule, prof, stream) in sessions {
            let rec = sim::synthesize_recording(&schedule, prof, config.fs, channels, seed::derive(ctx.seed, idx, stream))?;
            write_recording(&rec, &dir.join(format!("{kind}.hdr")))
                .with_context(|| format!("writing {kind} recording in {}", dir.display()))?;
            write_schedule(&schedule, &dir.join(format!("{kind}.csv")))?;
        }
        let profile_text = toml::to_string(&profile).context("serializing profile")?;
        fs::write(dir.join("profile.toml"), profile_text)?;
        println!("subject {subject:03}: {} ({:?})", dir.display(), profile.awareness_level);
    }
    Ok(())
}

fn cmd_train(ctx: &Ctx, args: &TrainArgs) -> Result<()> {
    let rec = read_recording(&args.recording).with_context(|| format!("reading {}", args.recording.display()))?;
    let schedule = read_schedule(&args.schedule)?;
    if schedule.count(&args.target) == 0 {
        bail!(
            "target {:?} does not occur in {} (candidates: {})",
            args.target,
            args.schedule.display(),
            schedule.candidate_ids().join(", ")
        );
    }
    let pre = &ctx.config.pipeline.preprocess;
    let mut cfg = ctx.config.pipeline.classifier.clone();
    cfg.rounds = args.rounds.unwrap_or(cfg.rounds);
    cfg.ridge = args.ridge.unwrap_or(cfg.ridge);
    cfg.gamma_max = args.gamma_max.unwrap_or(cfg.gamma_max);

    let data = preprocess(&rec, &schedule, &args.target, pre)?;
    let outcome = blr::train(&data, &cfg)?;
    for (m, ll) in outcome.log_likelihood.iter().enumerate() {
        println!("round {m:>3}  log-likelihood {ll:.9}");
    }
    ensure!(
        outcome.log_likelihood.windows(2).all(|w| w[1] >= w[0]),
        "training log-likelihood decreased"
    );
    let model = outcome.model.with_fingerprint(pre.fingerprint());
    let path = ctx.output(&args.model_name)?;
    write_model(&model, &path)?;
    println!("{} epochs, K = {}, {} rounds -> {}", data.len(), model.feature_dim, model.rounds.len(), path.display());
    Ok(())
}

#[derive(Serialize)]
struct ProbeReport<'a> {
    mode: String,
    threshold: f64,
    scores: &'a CandidateScores,
    predicted: Option<&'a str>,
    decision: &'a Decision,
}

fn cmd_probe(ctx: &Ctx, args: &ProbeArgs) -> Result<()> {
    let pre = &ctx.config.pipeline.preprocess;
    let model = read_model(&args.model).with_context(|| format!("reading {}", args.model.display()))?;
    let fingerprint = pre.fingerprint();
    if model.preprocessing_fingerprint != fingerprint {
        return Err(erprobe::Error::FingerprintMismatch {
            model: model.preprocessing_fingerprint.clone(),
            config: fingerprint,
        })
        .context("the model was trained with different preprocessing");
    }
    let rec = read_recording(&args.recording).with_context(|| format!("reading {}", args.recording.display()))?;
    let schedule = read_schedule(&args.schedule)?;
    let mut events = schedule.events.clone();
    if schedule.session_kind == SessionKind::Video && !args.no_blanks {
        events.extend(probe::blank_events_for_video(&schedule, seed::derive(ctx.seed, 0, Stream::BlankEpochs))?);
        events.sort_by(|a, b| a.onset_s.total_cmp(&b.onset_s));
    }
    let data = preprocess_events(&rec, &events, &args.target, pre)?;
    let scores = probe::candidate_scores(&model, &data.x, &data.candidate_ids)?;
    let mode = probe_mode(args.mode, &args.target);
    let decision = probe::decide(&scores, &mode, args.threshold)?;

    for (id, s) in &scores.candidates {
        println!("{id:>10}  mean {:+.6}  epochs {}", s.mean_score, s.epoch_count);
    }
    match (&decision, args.mode) {
        (Decision::Accept { candidate_id, confidence }, _) => {
            println!("ACCEPT {candidate_id} (confidence {confidence:+.6}, threshold {:+.6})", args.threshold)
        }
        (Decision::Reject { confidence }, Mode::Targeted) => {
            println!("REJECT {} (confidence {confidence:+.6}, threshold {:+.6})", args.target, args.threshold)
        }
        (Decision::Reject { confidence }, Mode::Agnostic) => println!(
            "REJECT no relevant stimulus (confidence {confidence:+.6}, threshold {:+.6})",
            args.threshold
        ),
    }
    let report = ProbeReport {
        mode: mode.to_string(),
        threshold: args.threshold,
        scores: &scores,
        predicted: probe::predict_target(&scores),
        decision: &decision,
    };
    let path = ctx.output("probe_report.json")?;
    fs::write(&path, serde_json::to_string_pretty(&report)? + "\n")?;
    Ok(())
}

fn write_sweep(ctx: &Ctx, sweep: &probe::SweepCurve) -> Result<PathBuf> {
    ensure!(sweep.is_monotone(), "sweep counts are not non-increasing in the threshold");
    let path = ctx.output("sweep.csv")?;
    sweep.write_csv(BufWriter::new(fs::File::create(&path)?))?;
    Ok(path)
}

fn cmd_cohort(ctx: &Ctx, args: &CohortArgs) -> Result<()> {
    let mut cfg = CohortConfig::new(args.subjects, ctx.seed);
    cfg.variant = args.variant.into();
    cfg.sweep_mode = probe_mode(args.mode, protocol::VIDEO_TARGET);
    cfg.experiment = ctx.config.clone();
    let report = run_cohort(&cfg)?;

    let path = ctx.output("cohort_report.json")?;
    fs::write(&path, report.to_json() + "\n")?;
    let sweep_path = write_sweep(ctx, &report.sweep)?;
    for s in &report.subjects {
        println!(
            "subject {:03}  predicted {:>8}  targeted {:+.4}  agnostic {:+.4}",
            s.subject, s.predicted, s.targeted_confidence, s.agnostic_confidence
        );
    }
    println!(
        "accuracy {:.4} ({}/{}) -> {}, {}",
        report.accuracy,
        report.n_correct,
        report.n_subjects,
        path.display(),
        sweep_path.display()
    );
    Ok(())
}

fn cmd_sweep(ctx: &Ctx, args: &SweepArgs) -> Result<()> {
    let text = fs::read_to_string(&args.report).with_context(|| format!("reading {}", args.report.display()))?;
    let report = CohortReport::from_json(&text)?;
    let inputs = report.sweep_inputs();
    let mode = probe_mode(args.mode, protocol::VIDEO_TARGET);
    let points = args.grid_points.unwrap_or(ctx.config.sweep_points);
    let grid = match (args.grid_min, args.grid_max) {
        (Some(lo), Some(hi)) => {
            ensure!(lo <= hi, "--grid-min must not exceed --grid-max");
            probe::linspace(lo, hi, points)
        }
        _ => probe::default_grid(&inputs, &mode, points)?,
    };
    let sweep = probe::threshold_sweep(&inputs, &mode, &grid)?;
    let path = write_sweep(ctx, &sweep)?;
    println!("{} thresholds over {} subjects -> {}", sweep.thresholds.len(), sweep.n_subjects, path.display());
    Ok(())
}

fn main() -> Result<()> {
    let cli = Cli::parse();
    let config = match &cli.config {
        Some(path) => ExperimentConfig::load(path).with_context(|| format!("loading {}", path.display()))?,
        None => ExperimentConfig::default(),
    };
    let ctx = Ctx {
        seed: cli.seed,
        out: cli.out,
        config,
    };
    match &cli.command {
        Command::Schedule(a) => cmd_schedule(&ctx, a),
        Command::Simulate(a) => cmd_simulate(&ctx, a),
        Command::Train(a) => cmd_train(&ctx, a),
        Command::Probe(a) => cmd_probe(&ctx, a),
        Command::Cohort(a) => cmd_cohort(&ctx, a),
        Command::Sweep(a) => cmd_sweep(&ctx, a),
    }
}
