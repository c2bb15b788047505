//! Synthetic ERP recordings with known ground truth.
//!
//! A recording is seeded background noise plus, for every stimulus event, a
//! Gaussian-bump ERP chosen by the event's class: the target template for
//! relevant stimuli, the (weaker) non-target template otherwise. Blank
//! stretches carry noise only.

mod cohort;

use ndarray::Array2;
use rand::Rng;
use rand_distr::{Distribution, Normal, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::protocol::{ClassLabel, StimulusSchedule};
use crate::seed::{self, Stream};
use crate::signal::Recording;

pub use cohort::{
    evaluate_subject, run_cohort, simulate_subject, CohortConfig, CohortReport, ProfileDistribution, SubjectResult,
    SessionShift, SubjectSessions, Variant,
};

/// Components are truncated beyond this many widths from their latency, and
/// are zero before stimulus onset.
pub const TAIL_WIDTHS: f64 = 6.0;
/// Corner frequency of the background-noise low-pass, Hz.
pub const NOISE_POLE_HZ: f64 = 8.0;
/// Recording continues this long after the last scheduled event.
pub const RECORDING_TAIL_S: f64 = 1.5;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErpComponent {
    pub latency_ms: f64,
    pub width_ms: f64,
    pub amplitude_uv: f64,
    pub channel_weights: Vec<f64>,
}

impl ErpComponent {
    fn value(&self, t_ms: f64, channel: usize) -> f64 {
        let u = (t_ms - self.latency_ms) / self.width_ms;
        if u.abs() > TAIL_WIDTHS || t_ms < 0.0 {
            return 0.0;
        }
        let weight = self.channel_weights.get(channel).copied().unwrap_or(0.0);
        self.amplitude_uv * weight * (-0.5 * u * u).exp()
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct ErpTemplate {
    pub components: Vec<ErpComponent>,
}

fn p300_weight(label: &str) -> f64 {
    match label {
        "Pz" => 1.0,
        "P3" | "P4" => 0.8,
        "Cz" => 0.7,
        "PO7" | "PO8" => 0.6,
        "Oz" => 0.5,
        "Fz" => 0.4,
        _ => 0.2,
    }
}

fn n200_weight(label: &str) -> f64 {
    match label {
        "Oz" => 1.0,
        "PO7" | "PO8" => 0.9,
        "Cz" | "Pz" => 0.6,
        "Fz" | "P3" | "P4" => 0.5,
        _ => 0.2,
    }
}

impl ErpTemplate {
    /// p300 (300 ms, 60 ms wide, `+p300_uv`, strongest at Pz) plus N200
    /// (200 ms, 40 ms wide, `-p300_uv / 2`, strongest occipitally).
    pub fn default_target<S: AsRef<str>>(channels: &[S], p300_uv: f64) -> Self {
        let weights = |f: fn(&str) -> f64| channels.iter().map(|c| f(c.as_ref())).collect();
        Self {
            components: vec![
                ErpComponent {
                    latency_ms: 300.0,
                    width_ms: 60.0,
                    amplitude_uv: p300_uv,
                    channel_weights: weights(p300_weight),
                },
                ErpComponent {
                    latency_ms: 200.0,
                    width_ms: 40.0,
                    amplitude_uv: -0.5 * p300_uv,
                    channel_weights: weights(n200_weight),
                },
            ],
        }
    }

    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            components: self
                .components
                .iter()
                .map(|c| ErpComponent {
                    amplitude_uv: c.amplitude_uv * factor,
                    ..c.clone()
                })
                .collect(),
        }
    }

    pub fn validate(&self, n_channels: usize) -> Result<()> {
        for (i, c) in self.components.iter().enumerate() {
            if !(c.width_ms > 0.0) {
                return Err(Error::Config(format!("ERP component {i}: width must be positive")));
            }
            if c.channel_weights.len() != n_channels {
                return Err(Error::DimensionMismatch {
                    expected: n_channels,
                    got: c.channel_weights.len(),
                });
            }
        }
        Ok(())
    }

    pub fn is_zero(&self) -> bool {
        self.components.iter().all(|c| c.amplitude_uv == 0.0)
    }

    /// `(earliest, latest)` time in ms with non-zero contribution.
    fn support_ms(&self) -> Option<(f64, f64)> {
        self.components
            .iter()
            .filter(|c| c.amplitude_uv != 0.0)
            .map(|c| ((c.latency_ms - TAIL_WIDTHS * c.width_ms).max(0.0), c.latency_ms + TAIL_WIDTHS * c.width_ms))
            .reduce(|a, b| (a.0.min(b.0), a.1.max(b.1)))
    }
}

/// Sum over components of `amplitude * weight[channel] * exp(-u^2 / 2)`,
/// `u = (t - latency) / width`, for `t >= 0`.
pub fn erp_waveform(template: &ErpTemplate, t_ms: f64, channel: usize) -> f64 {
    template.components.iter().map(|c| c.value(t_ms, channel)).sum()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum AwarenessLevel {
    Nothing,
    Something,
    Face,
    Identified,
}

impl AwarenessLevel {
    pub const ALL: [AwarenessLevel; 4] = [
        AwarenessLevel::Nothing,
        AwarenessLevel::Something,
        AwarenessLevel::Face,
        AwarenessLevel::Identified,
    ];

    /// Target-ERP gain used only when awareness scaling is switched on.
    pub fn gain(self) -> f64 {
        match self {
            AwarenessLevel::Nothing => 0.6,
            AwarenessLevel::Something => 0.75,
            AwarenessLevel::Face => 0.9,
            AwarenessLevel::Identified => 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubjectProfile {
    pub target_erp: ErpTemplate,
    pub nontarget_erp: ErpTemplate,
    pub noise_std_uv: f64,
    pub latency_jitter_ms: f64,
    pub amplitude_scale: f64,
    pub awareness_level: AwarenessLevel,
    /// Scale the target ERP by [`AwarenessLevel::gain`].
    #[serde(default)]
    pub awareness_scaling: bool,
}

impl SubjectProfile {
    /// Default templates for `channels`: target at `p300_uv`, non-target a
    /// 0.2x copy.
    pub fn with_defaults<S: AsRef<str>>(channels: &[S], p300_uv: f64, noise_std_uv: f64, latency_jitter_ms: f64) -> Self {
        let target = ErpTemplate::default_target(channels, p300_uv);
        Self {
            nontarget_erp: target.scaled(0.2),
            target_erp: target,
            noise_std_uv,
            latency_jitter_ms,
            amplitude_scale: 1.0,
            awareness_level: AwarenessLevel::Identified,
            awareness_scaling: false,
        }
    }

    pub fn validate(&self, n_channels: usize) -> Result<()> {
        self.target_erp.validate(n_channels)?;
        self.nontarget_erp.validate(n_channels)?;
        if !(self.noise_std_uv >= 0.0 && self.latency_jitter_ms >= 0.0 && self.amplitude_scale > 0.0) {
            return Err(Error::Config(
                "profile needs noise_std >= 0, jitter >= 0 and amplitude_scale > 0".into(),
            ));
        }
        Ok(())
    }

    fn template_for(&self, class: ClassLabel) -> Option<(&ErpTemplate, f64)> {
        match class {
            ClassLabel::Target => {
                let gain = if self.awareness_scaling {
                    self.awareness_level.gain()
                } else {
                    1.0
                };
                Some((&self.target_erp, self.amplitude_scale * gain))
            }
            ClassLabel::NonTarget => Some((&self.nontarget_erp, self.amplitude_scale)),
            ClassLabel::Unknown => None,
        }
    }
}

/// Gaussian noise through a one-pole low-pass at [`NOISE_POLE_HZ`], scaled
/// so the stationary standard deviation is `noise_std`. The filter state
/// starts in its stationary distribution.
pub fn background_noise(n_samples: usize, fs: f64, noise_std: f64, seed: u64) -> Vec<f64> {
    if noise_std == 0.0 || n_samples == 0 {
        return vec![0.0; n_samples];
    }
    let a = (-2.0 * std::f64::consts::PI * NOISE_POLE_HZ / fs).exp();
    let drive = noise_std * (1.0 - a * a).sqrt();
    let mut rng = seed::rng(seed);
    let mut out = Vec::with_capacity(n_samples);
    let mut y = noise_std * rng.sample::<f64, _>(StandardNormal);
    out.push(y);
    for _ in 1..n_samples {
        y = a * y + drive * rng.sample::<f64, _>(StandardNormal);
        out.push(y);
    }
    out
}

pub fn recording_len(schedule: &StimulusSchedule, fs: f64) -> usize {
    ((schedule.total_duration_s + RECORDING_TAIL_S) * fs).ceil() as usize
}

/// Noise only, no stimulus responses.
pub fn noise_recording<S: AsRef<str>>(n_samples: usize, fs: f64, channels: &[S], noise_std: f64, seed: u64) -> Result<Recording> {
    let labels: Vec<String> = channels.iter().map(|c| c.as_ref().to_string()).collect();
    let mut samples = Array2::zeros((labels.len(), n_samples));
    for (c, mut row) in samples.rows_mut().into_iter().enumerate() {
        let noise = background_noise(n_samples, fs, noise_std, seed::derive(seed, c as u64, Stream::Noise));
        row.assign(&ndarray::ArrayView1::from(&noise[..]));
    }
    Recording::new(fs, labels, samples)
}

/// Adds the ERP of every event to `recording`; jitter draws come from
/// `seed` in event order (one per event, whatever its class).
pub fn add_responses(recording: &mut Recording, schedule: &StimulusSchedule, profile: &SubjectProfile, seed: u64) -> Result<()> {
    let fs = recording.fs;
    let n = recording.n_samples() as i64;
    let jitter = Normal::new(0.0, profile.latency_jitter_ms).map_err(|e| Error::Config(e.to_string()))?;
    let mut rng = seed::rng(seed::derive(seed, 0, Stream::Jitter));
    for event in &schedule.events {
        let shift_ms = jitter.sample(&mut rng);
        let Some((template, gain)) = profile.template_for(event.class_label) else {
            continue;
        };
        let Some((lo_ms, hi_ms)) = template.support_ms() else {
            continue;
        };
        let t0 = event.onset_s + shift_ms / 1000.0;
        let first = (((t0 + lo_ms / 1000.0) * fs).floor() as i64).max(0);
        let last = (((t0 + hi_ms / 1000.0) * fs).ceil() as i64).min(n - 1);
        for (c, mut row) in recording.samples.rows_mut().into_iter().enumerate() {
            for i in first..=last {
                let t_ms = (i as f64 / fs - t0) * 1000.0;
                row[i as usize] += gain * erp_waveform(template, t_ms, c);
            }
        }
    }
    Ok(())
}

/// Background noise plus one ERP per scheduled event; deterministic in `seed`.
pub fn synthesize_recording<S: AsRef<str>>(
    schedule: &StimulusSchedule,
    profile: &SubjectProfile,
    fs: f64,
    channels: &[S],
    seed: u64,
) -> Result<Recording> {
    profile.validate(channels.len())?;
    let mut rec = noise_recording(recording_len(schedule, fs), fs, channels, profile.noise_std_uv, seed)?;
    add_responses(&mut rec, schedule, profile, seed)?;
    Ok(rec)
}
