//! Cohort runner: simulate, train and probe many subjects end to end.
//!
//! Per subject:
//!
//! 1. draw a profile and simulate a counting session (target digit `1`)
//!    and a video session (hidden `target` / `contrast` stimuli) whose
//!    response departs from the counting one by a [`SessionShift`];
//! 2. train the boosted classifier, either on the counting session
//!    ([`Variant::CountingTrained`]) or on the first half of the video
//!    epochs ([`Variant::FaceTrained`]);
//! 3. score video epochs for the three candidates `target`, `contrast` and
//!    `blank` (unmanipulated stretches, as many as contrast epochs) and
//!    record the prediction and confidence margins.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{synthesize_recording, AwarenessLevel, ErpTemplate, SubjectProfile};
use crate::blr::train;
use crate::config::ExperimentConfig;
use crate::error::{Error, Result};
use crate::probe::{self, CandidateScores, Decision, ProbeMode, SweepCurve};
use crate::protocol::{build_counting_schedule, build_video_schedule, COUNTING_TARGET, VIDEO_TARGET};
use crate::seed::{self, Stream};
use crate::signal::{preprocess, preprocess_events, LabeledDataset};

const P300_DELAY_MS: f64 = 60.0;
const DELAY_SPREAD_MS: f64 = 60.0;
const N200_GAIN: f64 = 2.0;

/// Per-subject variation around a base profile.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ProfileDistribution {
    /// Peak of the target p300, µV; the N200 is `-p300_uv / 2`.
    pub p300_uv: f64,
    /// Non-target template as a fraction of the target template.
    pub nontarget_ratio: f64,
    pub noise_std_uv: f64,
    pub latency_jitter_ms: f64,
    pub amplitude_scale: f64,
    /// Relative half-width of the uniform spread of `amplitude_scale`.
    pub amplitude_spread: f64,
    /// Relative half-width of the uniform spread of `noise_std_uv`.
    pub noise_spread: f64,
    pub awareness_scaling: bool,
    /// Differences of the video-session response from the counting one.
    pub video_shift: SessionShift,
}

/// How the response to subliminal faces departs from the response to
/// counted digits: positive components arrive later by a per-subject delay
/// drawn from `p300_delay_ms ± delay_spread_ms`, negative components are
/// scaled by `n200_gain`. The identity is `{0, 0, 1}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SessionShift {
    pub p300_delay_ms: f64,
    pub delay_spread_ms: f64,
    pub n200_gain: f64,
}

impl Default for SessionShift {
    fn default() -> Self {
        Self {
            p300_delay_ms: P300_DELAY_MS,
            delay_spread_ms: DELAY_SPREAD_MS,
            n200_gain: N200_GAIN,
        }
    }
}

impl SessionShift {
    pub fn identity() -> Self {
        Self {
            p300_delay_ms: 0.0,
            delay_spread_ms: 0.0,
            n200_gain: 1.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.delay_spread_ms >= 0.0 && self.n200_gain >= 0.0 && self.p300_delay_ms.is_finite()) {
            return Err(Error::Config("session shift needs finite delay, spread >= 0 and n200_gain >= 0".into()));
        }
        Ok(())
    }

    pub fn apply(&self, template: &ErpTemplate, delay_ms: f64) -> ErpTemplate {
        ErpTemplate {
            components: template
                .components
                .iter()
                .map(|c| {
                    let mut c = c.clone();
                    if c.amplitude_uv > 0.0 {
                        c.latency_ms += delay_ms;
                    } else {
                        c.amplitude_uv *= self.n200_gain;
                    }
                    c
                })
                .collect(),
        }
    }
}

impl Default for ProfileDistribution {
    fn default() -> Self {
        Self {
            p300_uv: 8.0,
            nontarget_ratio: 0.2,
            noise_std_uv: 15.0,
            latency_jitter_ms: 25.0,
            amplitude_scale: 1.0,
            amplitude_spread: 0.25,
            noise_spread: 0.2,
            awareness_scaling: false,
            video_shift: SessionShift::default(),
        }
    }
}

impl ProfileDistribution {
    pub fn sample<S: AsRef<str>>(&self, channels: &[S], seed: u64) -> Result<SubjectProfile> {
        let mut rng = seed::rng(seed);
        let mut spread = |half: f64| if half > 0.0 { 1.0 + rng.random_range(-half..=half) } else { 1.0 };
        let amplitude = self.amplitude_scale * spread(self.amplitude_spread);
        let noise = self.noise_std_uv * spread(self.noise_spread);
        let awareness = AwarenessLevel::ALL[rng.random_range(0..AwarenessLevel::ALL.len())];

        let mut profile = SubjectProfile::with_defaults(channels, self.p300_uv, noise, self.latency_jitter_ms);
        profile.nontarget_erp = profile.target_erp.scaled(self.nontarget_ratio);
        profile.amplitude_scale = amplitude;
        profile.awareness_level = awareness;
        profile.awareness_scaling = self.awareness_scaling;
        profile.validate(channels.len())?;
        Ok(profile)
    }

    /// The video-session profile of a subject whose counting profile is
    /// `counting`.
    pub fn sample_video(&self, counting: &SubjectProfile, seed: u64) -> Result<SubjectProfile> {
        let shift = &self.video_shift;
        shift.validate()?;
        let mut rng = seed::rng(seed);
        let spread = shift.delay_spread_ms;
        let delay = shift.p300_delay_ms + if spread > 0.0 { rng.random_range(-spread..=spread) } else { 0.0 };
        Ok(SubjectProfile {
            target_erp: shift.apply(&counting.target_erp, delay),
            nontarget_erp: shift.apply(&counting.nontarget_erp, delay),
            ..counting.clone()
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Variant {
    #[default]
    CountingTrained,
    FaceTrained,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CohortConfig {
    pub n_subjects: usize,
    pub seed: u64,
    pub variant: Variant,
    pub sweep_mode: ProbeMode,
    pub experiment: ExperimentConfig,
}

impl CohortConfig {
    pub fn new(n_subjects: usize, seed: u64) -> Self {
        Self {
            n_subjects,
            seed,
            variant: Variant::CountingTrained,
            sweep_mode: ProbeMode::Agnostic,
            experiment: ExperimentConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubjectResult {
    pub subject: usize,
    pub awareness: AwarenessLevel,
    pub predicted: String,
    pub true_target: String,
    pub targeted_confidence: f64,
    pub agnostic_confidence: f64,
    /// Targeted decision at threshold 0.
    pub decision: Decision,
    pub scores: CandidateScores,
    pub training_log_likelihood: Vec<f64>,
}

impl SubjectResult {
    pub fn correct(&self) -> bool {
        self.predicted == self.true_target
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CohortReport {
    pub n_subjects: usize,
    pub seed: u64,
    pub variant: Variant,
    pub subjects: Vec<SubjectResult>,
    pub n_correct: usize,
    pub accuracy: f64,
    pub sweep_mode: ProbeMode,
    pub sweep: SweepCurve,
}

impl CohortReport {
    pub fn sweep_inputs(&self) -> Vec<(CandidateScores, String)> {
        self.subjects.iter().map(|s| (s.scores.clone(), s.true_target.clone())).collect()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Parse(e.to_string()))
    }
}

/// Simulated data for one subject; exposed so callers can reuse it.
#[derive(Debug, Clone)]
pub struct SubjectSessions {
    pub profile: SubjectProfile,
    pub video_profile: SubjectProfile,
    pub counting: LabeledDataset,
    /// Video stimulus epochs and blank epochs, in time order.
    pub video: LabeledDataset,
}

pub fn simulate_subject(config: &ExperimentConfig, master_seed: u64, subject: usize) -> Result<SubjectSessions> {
    let idx = subject as u64;
    let channels = &config.pipeline.preprocess.channels;
    let profile = config.subjects.sample(channels, seed::derive(master_seed, idx, Stream::Profile))?;
    let video_profile = config
        .subjects
        .sample_video(&profile, seed::derive(master_seed, idx, Stream::VideoProfile))?;

    let c = &config.protocol.counting;
    let counting_schedule = build_counting_schedule(
        seed::derive(master_seed, idx, Stream::CountingSchedule),
        c.stim_duration_s,
        c.isi_range_s,
    )?;
    let counting_rec = synthesize_recording(
        &counting_schedule,
        &profile,
        config.fs,
        channels,
        seed::derive(master_seed, idx, Stream::CountingRecording),
    )?;
    let counting = preprocess(&counting_rec, &counting_schedule, COUNTING_TARGET, &config.pipeline.preprocess)?;

    let v = &config.protocol.video;
    let video_schedule = build_video_schedule(v.duration_s, v.period_s, v.stim_duration_s)?;
    let video_rec = synthesize_recording(
        &video_schedule,
        &video_profile,
        config.fs,
        channels,
        seed::derive(master_seed, idx, Stream::VideoRecording),
    )?;
    let blanks = probe::blank_events_for_video(&video_schedule, seed::derive(master_seed, idx, Stream::BlankEpochs))?;
    let mut events = video_schedule.events.clone();
    events.extend(blanks);
    events.sort_by(|a, b| a.onset_s.total_cmp(&b.onset_s));
    let video = preprocess_events(&video_rec, &events, VIDEO_TARGET, &config.pipeline.preprocess)?;

    Ok(SubjectSessions {
        profile,
        video_profile,
        counting,
        video,
    })
}

pub fn evaluate_subject(config: &ExperimentConfig, variant: Variant, master_seed: u64, subject: usize) -> Result<SubjectResult> {
    let sessions = simulate_subject(config, master_seed, subject)?;
    let (train_set, test_set) = match variant {
        Variant::CountingTrained => (sessions.counting, sessions.video),
        Variant::FaceTrained => {
            let half = sessions.video.len() / 2;
            (
                sessions.video.slice_rows(0..half),
                sessions.video.slice_rows(half..sessions.video.len()),
            )
        }
    };
    let outcome = train(&train_set, &config.pipeline.classifier)?;
    let model = outcome
        .model
        .with_fingerprint(config.pipeline.preprocess.fingerprint());
    let scores = probe::candidate_scores(&model, &test_set.x, &test_set.candidate_ids)?;

    let targeted = ProbeMode::Targeted(VIDEO_TARGET.to_string());
    Ok(SubjectResult {
        subject,
        awareness: sessions.profile.awareness_level,
        predicted: probe::predict_target(&scores).unwrap_or_default().to_string(),
        true_target: VIDEO_TARGET.to_string(),
        targeted_confidence: probe::confidence(&scores, &targeted)?,
        agnostic_confidence: probe::confidence(&scores, &ProbeMode::Agnostic)?,
        decision: probe::decide(&scores, &targeted, 0.0)?,
        scores,
        training_log_likelihood: outcome.log_likelihood,
    })
}

/// Runs every subject (in parallel) and aggregates in subject order.
pub fn run_cohort(config: &CohortConfig) -> Result<CohortReport> {
    if config.n_subjects == 0 {
        return Err(Error::Config("a cohort needs at least one subject".into()));
    }
    let subjects: Vec<SubjectResult> = (0..config.n_subjects)
        .into_par_iter()
        .map(|i| evaluate_subject(&config.experiment, config.variant, config.seed, i))
        .collect::<Result<_>>()?;

    let n_correct = subjects.iter().filter(|s| s.correct()).count();
    let inputs: Vec<(CandidateScores, String)> =
        subjects.iter().map(|s| (s.scores.clone(), s.true_target.clone())).collect();
    let grid = probe::default_grid(&inputs, &config.sweep_mode, config.experiment.sweep_points)?;
    let sweep = probe::threshold_sweep(&inputs, &config.sweep_mode, &grid)?;
    Ok(CohortReport {
        n_subjects: config.n_subjects,
        seed: config.seed,
        variant: config.variant,
        n_correct,
        accuracy: n_correct as f64 / config.n_subjects as f64,
        subjects,
        sweep_mode: config.sweep_mode.clone(),
        sweep,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::signal::DEFAULT_CHANNELS;

    #[test]
    fn identity_shift_keeps_profile() {
        let dist = ProfileDistribution {
            video_shift: SessionShift::identity(),
            ..Default::default()
        };
        let counting = dist.sample(&DEFAULT_CHANNELS, 3).unwrap();
        assert_eq!(dist.sample_video(&counting, 4).unwrap(), counting);
    }

    #[test]
    fn shift_delays_positive_and_scales_negative_components() {
        let base = ErpTemplate::default_target(&DEFAULT_CHANNELS, 8.0);
        let shift = SessionShift {
            p300_delay_ms: 50.0,
            delay_spread_ms: 0.0,
            n200_gain: 3.0,
        };
        let out = shift.apply(&base, 50.0);
        assert_eq!(out.components[0].latency_ms, 350.0);
        assert_eq!(out.components[0].amplitude_uv, 8.0);
        assert_eq!(out.components[1].latency_ms, 200.0);
        assert_eq!(out.components[1].amplitude_uv, -12.0);
    }

    #[test]
    fn sampled_delay_stays_in_range() {
        let dist = ProfileDistribution::default();
        let shift = &dist.video_shift;
        for s in 0..50 {
            let counting = dist.sample(&DEFAULT_CHANNELS, s).unwrap();
            let video = dist.sample_video(&counting, s + 1000).unwrap();
            let delay = video.target_erp.components[0].latency_ms - counting.target_erp.components[0].latency_ms;
            assert!((delay - shift.p300_delay_ms).abs() <= shift.delay_spread_ms + 1e-9);
            assert_eq!(video.noise_std_uv, counting.noise_std_uv);
        }
        let bad = SessionShift {
            n200_gain: -1.0,
            ..SessionShift::identity()
        };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn zero_subjects_is_an_error() {
        assert!(matches!(run_cohort(&CohortConfig::new(0, 1)), Err(Error::Config(_))));
    }
}
