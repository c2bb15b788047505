//! Linear-phase windowed-sinc low-pass design and zero-phase application.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Hamming main-lobe transition width is about `3.3 / N` cycles per sample.
const HAMMING_TRANSITION: f64 = 3.3;

/// How band edges are normalized.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FrequencyConvention {
    /// Edges are fractions of the Nyquist frequency (Nyquist = 1).
    #[default]
    Nyquist,
    /// Edges are fractions of the sampling rate (fs = 1, Nyquist = 0.5).
    SampleRate,
}

impl FrequencyConvention {
    /// Factor converting an edge to cycles per sample.
    fn to_cycles(self) -> f64 {
        match self {
            FrequencyConvention::Nyquist => 0.5,
            FrequencyConvention::SampleRate => 1.0,
        }
    }

    fn upper_bound(self) -> f64 {
        0.5 / self.to_cycles()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FilterConfig {
    pub passband_edge: f64,
    pub stopband_edge: f64,
    pub convention: FrequencyConvention,
}

impl Default for FilterConfig {
    fn default() -> Self {
        Self {
            passband_edge: 0.35,
            stopband_edge: 0.4,
            convention: FrequencyConvention::Nyquist,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LowPass {
    taps: Vec<f64>,
}

impl LowPass {
    /// Hamming-windowed sinc with cutoff halfway through the transition band
    /// and an odd tap count large enough that the main-lobe transition fits
    /// inside `[passband_edge, stopband_edge]`. Taps are normalized to unit DC
    /// gain.
    pub fn design(config: &FilterConfig) -> Result<Self> {
        let FilterConfig {
            passband_edge: pb,
            stopband_edge: sb,
            convention,
        } = *config;
        let upper = convention.upper_bound();
        if !(pb > 0.0 && pb < sb && sb < upper) {
            return Err(Error::Config(format!(
                "band edges must satisfy 0 < passband ({pb}) < stopband ({sb}) < {upper}"
            )));
        }
        let scale = convention.to_cycles();
        let cutoff = 0.5 * (pb + sb) * scale;
        let transition = (sb - pb) * scale;
        let mut n = (HAMMING_TRANSITION / transition).ceil() as usize;
        if n.is_multiple_of(2) {
            n += 1;
        }
        let mid = (n - 1) as f64 / 2.0;
        let two_pi = 2.0 * std::f64::consts::PI;
        let mut taps: Vec<f64> = (0..n)
            .map(|i| {
                let x = i as f64 - mid;
                let sinc = if x == 0.0 {
                    2.0 * cutoff
                } else {
                    (two_pi * cutoff * x).sin() / (std::f64::consts::PI * x)
                };
                let window = 0.54 - 0.46 * (two_pi * i as f64 / (n - 1) as f64).cos();
                sinc * window
            })
            .collect();
        let sum: f64 = taps.iter().sum();
        taps.iter_mut().for_each(|t| *t /= sum);
        Ok(Self { taps })
    }

    pub fn taps(&self) -> &[f64] {
        &self.taps
    }

    pub fn group_delay(&self) -> usize {
        (self.taps.len() - 1) / 2
    }

    /// Magnitude response at `freq` given in Nyquist units (Nyquist = 1).
    pub fn gain_at(&self, freq: f64) -> f64 {
        let omega = std::f64::consts::PI * freq;
        let (re, im) = self
            .taps
            .iter()
            .enumerate()
            .fold((0.0, 0.0), |(re, im), (k, &h)| {
                let phase = omega * k as f64;
                (re + h * phase.cos(), im - h * phase.sin())
            });
        re.hypot(im)
    }

    /// Filters `input` with the group delay removed; samples outside the
    /// input are taken as zero, so the output has the input's length.
    pub fn apply(&self, input: &[f64], output: &mut [f64]) {
        assert_eq!(input.len(), output.len());
        let n = input.len() as isize;
        let len = self.taps.len() as isize;
        let delay = self.group_delay() as isize;
        // out[i] = sum_k h[k] * x[i + delay - k] = sum_j r[j] * x[i - delay + j]
        // with r the reversed taps.
        let reversed: Vec<f64> = self.taps.iter().rev().copied().collect();
        for (i, out) in output.iter_mut().enumerate() {
            let start = i as isize - delay;
            let j_lo = (-start).max(0);
            let j_hi = (n - start).min(len);
            if j_lo >= j_hi {
                *out = 0.0;
                continue;
            }
            let x = &input[(start + j_lo) as usize..(start + j_hi) as usize];
            let r = &reversed[j_lo as usize..j_hi as usize];
            *out = dot(r, x);
        }
    }
}

/// Dot product with four independent accumulators so the loop vectorizes.
fn dot(a: &[f64], b: &[f64]) -> f64 {
    let mut acc = [0.0; 4];
    let (ca, ra) = (a.chunks_exact(4), a.chunks_exact(4).remainder());
    let rb = b.chunks_exact(4).remainder();
    for (x, y) in ca.zip(b.chunks_exact(4)) {
        for l in 0..4 {
            acc[l] += x[l] * y[l];
        }
    }
    let tail: f64 = ra.iter().zip(rb).map(|(x, y)| x * y).sum();
    (acc[0] + acc[1]) + (acc[2] + acc[3]) + tail
}
