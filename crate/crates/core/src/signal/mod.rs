//! Recordings, epochs and the preprocessing chain that turns them into
//! feature vectors.
//!
//! The chain per epoch is: cut `[onset - pre, onset + post)`, subtract the
//! pre-stimulus mean, low-pass, take the median of every `factor`
//! consecutive samples, keep the configured channels, and concatenate the
//! channels row-major into one vector.

mod container;
mod filter;

use ndarray::{s, Array2, ArrayView1};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::protocol::{StimulusEvent, StimulusSchedule};

pub use container::{payload_path, read_recording, write_recording};
pub use filter::{FilterConfig, FrequencyConvention, LowPass};

/// Electrodes along the midline, parietal and occipital sites.
pub const DEFAULT_CHANNELS: [&str; 8] = ["Fz", "Cz", "Pz", "P3", "P4", "PO7", "PO8", "Oz"];

/// Guard against `0.3 * 10.0 == 2.9999999999999996` style truncation when
/// converting times to sample indices.
const INDEX_EPS: f64 = 1e-9;

pub(crate) fn time_to_index(t_s: f64, fs: f64) -> i64 {
    (t_s * fs + INDEX_EPS).floor() as i64
}

#[derive(Debug, Clone, PartialEq)]
pub struct Recording {
    pub fs: f64,
    pub channel_labels: Vec<String>,
    /// `[n_channels, n_samples]`, µV.
    pub samples: Array2<f64>,
}

impl Recording {
    pub fn new(fs: f64, channel_labels: Vec<String>, samples: Array2<f64>) -> Result<Self> {
        if !(fs.is_finite() && fs > 0.0) {
            return Err(Error::Config(format!("sampling rate must be positive, got {fs}")));
        }
        if samples.nrows() != channel_labels.len() {
            return Err(Error::DimensionMismatch {
                expected: channel_labels.len(),
                got: samples.nrows(),
            });
        }
        Ok(Self {
            fs,
            channel_labels,
            samples,
        })
    }

    pub fn n_channels(&self) -> usize {
        self.samples.nrows()
    }

    pub fn n_samples(&self) -> usize {
        self.samples.ncols()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Epoch {
    /// `[channels, samples]`, µV.
    pub data: Array2<f64>,
    pub channel_labels: Vec<String>,
    pub event: StimulusEvent,
    pub fs: f64,
    pub n_pre: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FeatureVector {
    pub values: Vec<f64>,
    pub label: Option<u8>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LabeledDataset {
    /// `[N, K]`.
    pub x: Array2<f64>,
    pub y: Vec<u8>,
    pub candidate_ids: Vec<String>,
}

impl LabeledDataset {
    pub fn len(&self) -> usize {
        self.y.len()
    }

    pub fn is_empty(&self) -> bool {
        self.y.is_empty()
    }

    pub fn feature_dim(&self) -> usize {
        self.x.ncols()
    }

    pub fn row(&self, i: usize) -> ArrayView1<'_, f64> {
        self.x.row(i)
    }

    pub fn feature_vector(&self, i: usize) -> FeatureVector {
        FeatureVector {
            values: self.x.row(i).to_vec(),
            label: Some(self.y[i]),
        }
    }

    /// Rows in `range`, in order.
    pub fn slice_rows(&self, range: std::ops::Range<usize>) -> Self {
        Self {
            x: self.x.slice(s![range.clone(), ..]).to_owned(),
            y: self.y[range.clone()].to_vec(),
            candidate_ids: self.candidate_ids[range].to_vec(),
        }
    }

    /// Stacks `other` below `self`.
    pub fn concat(&self, other: &Self) -> Result<Self> {
        if self.feature_dim() != other.feature_dim() {
            return Err(Error::DimensionMismatch {
                expected: self.feature_dim(),
                got: other.feature_dim(),
            });
        }
        let x = ndarray::concatenate(ndarray::Axis(0), &[self.x.view(), other.x.view()])
            .map_err(|e| Error::Numerical(e.to_string()))?;
        Ok(Self {
            x,
            y: self.y.iter().chain(&other.y).copied().collect(),
            candidate_ids: self.candidate_ids.iter().chain(&other.candidate_ids).cloned().collect(),
        })
    }

    /// Replaces labels by `candidate_id == target_id`.
    pub fn relabel(&mut self, target_id: &str) {
        for (y, id) in self.y.iter_mut().zip(&self.candidate_ids) {
            *y = u8::from(id == target_id);
        }
    }
}

fn window_lengths(window: (f64, f64), fs: f64) -> (usize, usize) {
    let n_pre = time_to_index(window.0, fs).max(0) as usize;
    let n_post = time_to_index(window.1, fs).max(0) as usize;
    (n_pre, n_post)
}

/// One epoch per event; see [`extract_epochs_for_events`].
pub fn extract_epochs(recording: &Recording, schedule: &StimulusSchedule, window: (f64, f64)) -> Result<Vec<Epoch>> {
    extract_epochs_for_events(recording, &schedule.events, window)
}

/// Cuts samples `[floor(onset*fs) - n_pre, floor(onset*fs) + n_post)` with
/// `n_pre = floor(pre*fs)` and `n_post = floor(post*fs)`.
pub fn extract_epochs_for_events(recording: &Recording, events: &[StimulusEvent], window: (f64, f64)) -> Result<Vec<Epoch>> {
    let (pre, post) = window;
    if !(pre >= 0.0 && post > 0.0 && pre.is_finite() && post.is_finite()) {
        return Err(Error::Config(format!("invalid epoch window ({pre}, {post})")));
    }
    let fs = recording.fs;
    let (n_pre, n_post) = window_lengths(window, fs);
    let n_samples = recording.n_samples();
    events
        .iter()
        .enumerate()
        .map(|(index, event)| {
            let onset = time_to_index(event.onset_s, fs);
            let start = onset - n_pre as i64;
            let end = onset + n_post as i64;
            if start < 0 || end > n_samples as i64 || !event.onset_s.is_finite() {
                return Err(Error::OutOfRange {
                    index,
                    onset_s: event.onset_s,
                    start,
                    end,
                    n_samples,
                });
            }
            Ok(Epoch {
                data: recording.samples.slice(s![.., start as usize..end as usize]).to_owned(),
                channel_labels: recording.channel_labels.clone(),
                event: event.clone(),
                fs,
                n_pre,
            })
        })
        .collect()
}

/// Subtracts each channel's mean over the first `n_pre` samples.
pub fn baseline_correct(epoch: &Epoch) -> Result<Epoch> {
    if epoch.n_pre == 0 {
        return Err(Error::Precondition("baseline correction needs a pre-stimulus window".into()));
    }
    if epoch.n_pre > epoch.data.ncols() {
        return Err(Error::Precondition(format!(
            "pre-stimulus window of {} samples exceeds epoch length {}",
            epoch.n_pre,
            epoch.data.ncols()
        )));
    }
    let mut out = epoch.clone();
    for mut row in out.data.rows_mut() {
        // Two-pass mean keeps the residual pre-window mean at rounding level.
        let mean = row.slice(s![..epoch.n_pre]).sum() / epoch.n_pre as f64;
        row.mapv_inplace(|v| v - mean);
        let residual = row.slice(s![..epoch.n_pre]).sum() / epoch.n_pre as f64;
        row.mapv_inplace(|v| v - residual);
    }
    Ok(out)
}

pub fn lowpass(epoch: &Epoch, passband_edge: f64, stopband_edge: f64) -> Result<Epoch> {
    let filter = LowPass::design(&FilterConfig {
        passband_edge,
        stopband_edge,
        convention: FrequencyConvention::Nyquist,
    })?;
    Ok(apply_filter(epoch, &filter))
}

pub fn apply_filter(epoch: &Epoch, filter: &LowPass) -> Epoch {
    let mut out = epoch.clone();
    let mut buf = vec![0.0; epoch.data.ncols()];
    for (src, mut dst) in epoch.data.rows().into_iter().zip(out.data.rows_mut()) {
        let input = src.to_vec();
        filter.apply(&input, &mut buf);
        dst.assign(&ArrayView1::from(&buf[..]));
    }
    out
}

fn median_in_place(block: &mut [f64]) -> f64 {
    block.sort_unstable_by(f64::total_cmp);
    let n = block.len();
    if n % 2 == 1 {
        block[n / 2]
    } else {
        0.5 * (block[n / 2 - 1] + block[n / 2])
    }
}

/// Median of every `factor` consecutive samples per channel.
pub fn median_decimate(epoch: &Epoch, factor: usize) -> Result<Epoch> {
    if factor == 0 {
        return Err(Error::Precondition("decimation factor must be at least 1".into()));
    }
    let len = epoch.data.ncols();
    if !len.is_multiple_of(factor) {
        return Err(Error::Precondition(format!(
            "epoch length {len} is not divisible by decimation factor {factor}"
        )));
    }
    let out_len = len / factor;
    let mut data = Array2::zeros((epoch.data.nrows(), out_len));
    let mut block = vec![0.0; factor];
    for (src, mut dst) in epoch.data.rows().into_iter().zip(data.rows_mut()) {
        for j in 0..out_len {
            for (b, v) in block.iter_mut().zip(src.slice(s![j * factor..(j + 1) * factor])) {
                *b = *v;
            }
            dst[j] = median_in_place(&mut block);
        }
    }
    Ok(Epoch {
        data,
        channel_labels: epoch.channel_labels.clone(),
        event: epoch.event.clone(),
        fs: epoch.fs / factor as f64,
        n_pre: epoch.n_pre / factor,
    })
}

pub fn channel_indices<S: AsRef<str>>(labels: &[String], names: &[S]) -> Result<Vec<usize>> {
    names
        .iter()
        .map(|name| {
            let name = name.as_ref();
            labels
                .iter()
                .position(|l| l == name)
                .ok_or_else(|| Error::UnknownChannel(name.to_string()))
        })
        .collect()
}

/// Rows in the order of `names`.
pub fn select_channels<S: AsRef<str>>(epoch: &Epoch, names: &[S]) -> Result<Epoch> {
    let idx = channel_indices(&epoch.channel_labels, names)?;
    Ok(Epoch {
        data: epoch.data.select(ndarray::Axis(0), &idx),
        channel_labels: idx.iter().map(|&i| epoch.channel_labels[i].clone()).collect(),
        event: epoch.event.clone(),
        fs: epoch.fs,
        n_pre: epoch.n_pre,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PreprocessConfig {
    /// Seconds before and after onset.
    pub window: (f64, f64),
    pub filter: FilterConfig,
    pub decimation: usize,
    pub channels: Vec<String>,
}

impl Default for PreprocessConfig {
    fn default() -> Self {
        Self {
            window: (0.2, 1.0),
            filter: FilterConfig::default(),
            decimation: 4,
            channels: DEFAULT_CHANNELS.iter().map(|s| s.to_string()).collect(),
        }
    }
}

impl PreprocessConfig {
    /// Samples per channel after decimation at sampling rate `fs`.
    pub fn decimated_len(&self, fs: f64) -> Result<usize> {
        let (n_pre, n_post) = window_lengths(self.window, fs);
        let len = n_pre + n_post;
        if self.decimation == 0 || len % self.decimation != 0 {
            return Err(Error::Precondition(format!(
                "epoch length {len} is not divisible by decimation factor {}",
                self.decimation
            )));
        }
        Ok(len / self.decimation)
    }

    pub fn feature_dim(&self, fs: f64) -> Result<usize> {
        Ok(self.channels.len() * self.decimated_len(fs)?)
    }

    /// SHA-256 over a canonical rendering of every setting that affects the
    /// feature layout, hex-encoded and truncated to 16 bytes.
    pub fn fingerprint(&self) -> String {
        let canonical = format!(
            "window={:.17e},{:.17e};pb={:.17e};sb={:.17e};conv={:?};dec={};ch={}",
            self.window.0,
            self.window.1,
            self.filter.passband_edge,
            self.filter.stopband_edge,
            self.filter.convention,
            self.decimation,
            self.channels.join(",")
        );
        let digest = Sha256::digest(canonical.as_bytes());
        hex::encode(&digest[..16])
    }
}

/// Baseline, filter and decimate one extracted epoch whose channels are
/// already selected.
pub fn clean_epoch(epoch: &Epoch, filter: &LowPass, decimation: usize) -> Result<Epoch> {
    let based = baseline_correct(epoch)?;
    let filtered = apply_filter(&based, filter);
    median_decimate(&filtered, decimation)
}

/// Full chain for a schedule; row `i` corresponds to `schedule.events[i]`.
pub fn preprocess(
    recording: &Recording,
    schedule: &StimulusSchedule,
    target_id: &str,
    config: &PreprocessConfig,
) -> Result<LabeledDataset> {
    preprocess_events(recording, &schedule.events, target_id, config)
}

/// Full chain for an arbitrary event list.
///
/// Channel selection happens right after extraction; every later step acts
/// per channel, so the result equals running it last.
pub fn preprocess_events(
    recording: &Recording,
    events: &[StimulusEvent],
    target_id: &str,
    config: &PreprocessConfig,
) -> Result<LabeledDataset> {
    let filter = LowPass::design(&config.filter)?;
    let k = config.feature_dim(recording.fs)?;
    let idx = channel_indices(&recording.channel_labels, &config.channels)?;
    let epochs = extract_epochs_for_events(recording, events, config.window)?;

    let rows: Vec<Vec<f64>> = epochs
        .into_par_iter()
        .map(|epoch| {
            let selected = Epoch {
                data: epoch.data.select(ndarray::Axis(0), &idx),
                channel_labels: config.channels.clone(),
                ..epoch
            };
            let cleaned = clean_epoch(&selected, &filter, config.decimation)?;
            Ok(cleaned.data.iter().copied().collect())
        })
        .collect::<Result<_>>()?;

    let mut x = Array2::zeros((rows.len(), k));
    for (mut dst, row) in x.rows_mut().into_iter().zip(&rows) {
        dst.assign(&ArrayView1::from(&row[..]));
    }
    Ok(LabeledDataset {
        x,
        y: events.iter().map(|e| u8::from(e.candidate_id == target_id)).collect(),
        candidate_ids: events.iter().map(|e| e.candidate_id.clone()).collect(),
    })
}
