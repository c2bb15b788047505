//! Candidate-level decisions on top of per-epoch classifier scores.
//!
//! Scores of all epochs belonging to a candidate stimulus are averaged; the
//! candidate with the highest mean is the prediction. A confidence margin
//! turns the prediction into an accept/reject decision:
//!
//! - targeted: `mean(target) - max(mean(other))`, may be negative;
//! - agnostic: `best mean - second best mean`, never negative.
//!
//! A decision is accepted when the margin is at least the threshold.

use std::collections::BTreeMap;
use std::fmt;
use std::io::Write;

use rand::seq::index;
use serde::{Deserialize, Serialize};

use crate::blr::BoostedModel;
use crate::error::{Error, Result};
use crate::protocol::{ClassLabel, Position, StimulusEvent, StimulusSchedule, VIDEO_CONTRAST};
use crate::seed;

pub const BLANK_ID: &str = "blank";

/// `(mean score, epoch count)` per candidate, ordered by candidate id.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct CandidateScores {
    pub candidates: BTreeMap<String, CandidateScore>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CandidateScore {
    pub mean_score: f64,
    pub epoch_count: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum ProbeMode {
    Targeted(String),
    Agnostic,
}

impl fmt::Display for ProbeMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ProbeMode::Targeted(id) => write!(f, "targeted({id})"),
            ProbeMode::Agnostic => f.write_str("agnostic"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Decision {
    Accept { candidate_id: String, confidence: f64 },
    Reject { confidence: f64 },
}

impl Decision {
    pub fn confidence(&self) -> f64 {
        match self {
            Decision::Accept { confidence, .. } | Decision::Reject { confidence } => *confidence,
        }
    }

    pub fn accepted(&self) -> Option<&str> {
        match self {
            Decision::Accept { candidate_id, .. } => Some(candidate_id),
            Decision::Reject { .. } => None,
        }
    }
}

impl CandidateScores {
    /// Means of already-computed epoch scores, grouped by candidate id.
    pub fn from_epoch_scores<S: AsRef<str>>(ids: &[S], scores: &[f64]) -> Result<Self> {
        if ids.len() != scores.len() {
            return Err(Error::DimensionMismatch {
                expected: ids.len(),
                got: scores.len(),
            });
        }
        let mut sums: BTreeMap<String, (f64, usize)> = BTreeMap::new();
        for (id, &s) in ids.iter().zip(scores) {
            let e = sums.entry(id.as_ref().to_string()).or_insert((0.0, 0));
            e.0 += s;
            e.1 += 1;
        }
        Ok(Self {
            candidates: sums
                .into_iter()
                .map(|(id, (sum, n))| {
                    (
                        id,
                        CandidateScore {
                            mean_score: sum / n as f64,
                            epoch_count: n,
                        },
                    )
                })
                .collect(),
        })
    }

    /// Builds the table from explicit groups; an empty group is an error.
    pub fn from_groups<'a>(groups: impl IntoIterator<Item = (&'a str, &'a [f64])>) -> Result<Self> {
        let mut candidates = BTreeMap::new();
        for (id, scores) in groups {
            if scores.is_empty() {
                return Err(Error::EmptyCandidate(id.to_string()));
            }
            candidates.insert(
                id.to_string(),
                CandidateScore {
                    mean_score: scores.iter().sum::<f64>() / scores.len() as f64,
                    epoch_count: scores.len(),
                },
            );
        }
        Ok(Self { candidates })
    }

    pub fn len(&self) -> usize {
        self.candidates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.candidates.is_empty()
    }

    pub fn mean(&self, id: &str) -> Option<f64> {
        self.candidates.get(id).map(|c| c.mean_score)
    }

    /// Applies `a * s + b` to every mean (the effect of transforming every
    /// epoch score the same way).
    pub fn affine(&self, a: f64, b: f64) -> Self {
        Self {
            candidates: self
                .candidates
                .iter()
                .map(|(id, c)| {
                    (
                        id.clone(),
                        CandidateScore {
                            mean_score: a * c.mean_score + b,
                            ..*c
                        },
                    )
                })
                .collect(),
        }
    }

    /// Candidates sorted by descending mean, ties by ascending id.
    fn ranked(&self) -> Vec<(&str, f64)> {
        let mut v: Vec<(&str, f64)> = self.candidates.iter().map(|(id, c)| (id.as_str(), c.mean_score)).collect();
        v.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(b.0)));
        v
    }
}

/// Scores every row of `features` and averages per candidate id.
pub fn candidate_scores<S: AsRef<str>>(
    model: &BoostedModel,
    features: &ndarray::Array2<f64>,
    candidate_ids: &[S],
) -> Result<CandidateScores> {
    let scores = model.decision_values(features)?;
    CandidateScores::from_epoch_scores(candidate_ids, &scores)
}

/// Argmax of the mean score; ties go to the lexicographically smallest id.
pub fn predict_target(scores: &CandidateScores) -> Option<&str> {
    scores.ranked().first().map(|(id, _)| *id)
}

pub fn confidence(scores: &CandidateScores, mode: &ProbeMode) -> Result<f64> {
    if scores.len() < 2 {
        return Err(Error::Precondition(format!(
            "a confidence margin needs at least two candidates, got {}",
            scores.len()
        )));
    }
    match mode {
        ProbeMode::Targeted(target) => {
            let t = scores.mean(target).ok_or_else(|| Error::MissingCandidate(target.clone()))?;
            let best_other = scores
                .candidates
                .iter()
                .filter(|(id, _)| *id != target)
                .map(|(_, c)| c.mean_score)
                .fold(f64::NEG_INFINITY, f64::max);
            Ok(t - best_other)
        }
        ProbeMode::Agnostic => {
            let ranked = scores.ranked();
            Ok(ranked[0].1 - ranked[1].1)
        }
    }
}

/// Accepts when the margin is at least `threshold`.
pub fn decide(scores: &CandidateScores, mode: &ProbeMode, threshold: f64) -> Result<Decision> {
    let margin = confidence(scores, mode)?;
    if margin >= threshold {
        let candidate_id = match mode {
            ProbeMode::Targeted(target) => target.clone(),
            ProbeMode::Agnostic => predict_target(scores).expect("two or more candidates").to_string(),
        };
        Ok(Decision::Accept {
            candidate_id,
            confidence: margin,
        })
    } else {
        Ok(Decision::Reject { confidence: margin })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepCurve {
    pub thresholds: Vec<f64>,
    pub accepted_correct: Vec<usize>,
    pub accepted_wrong: Vec<usize>,
    pub n_subjects: usize,
}

impl SweepCurve {
    pub fn is_monotone(&self) -> bool {
        let sorted = self.thresholds.windows(2).all(|w| w[0] <= w[1]);
        let non_increasing = |v: &[usize]| v.windows(2).all(|w| w[1] <= w[0]);
        sorted && non_increasing(&self.accepted_correct) && non_increasing(&self.accepted_wrong)
    }

    /// `threshold,accepted_correct,accepted_wrong,n_subjects`, LF endings.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "threshold,accepted_correct,accepted_wrong,n_subjects")?;
        for ((t, c), e) in self.thresholds.iter().zip(&self.accepted_correct).zip(&self.accepted_wrong) {
            writeln!(w, "{t:.9},{c},{e},{}", self.n_subjects)?;
        }
        Ok(())
    }
}

/// `n` evenly spaced thresholds over `[-m, m]`, `m` the largest absolute
/// confidence in the cohort under `mode` (1 if all margins are zero).
pub fn default_grid(subjects: &[(CandidateScores, String)], mode: &ProbeMode, n: usize) -> Result<Vec<f64>> {
    let mut span = 0.0f64;
    for (scores, _) in subjects {
        span = span.max(confidence(scores, mode)?.abs());
    }
    if span == 0.0 || !span.is_finite() {
        span = 1.0;
    }
    Ok(linspace(-span, span, n))
}

pub fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    match n {
        0 => vec![],
        1 => vec![lo],
        _ => (0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64).collect(),
    }
}

/// At each threshold (sorted ascending), counts subjects whose decision
/// accepts their true target (correct) or any other candidate (wrong).
pub fn threshold_sweep(subjects: &[(CandidateScores, String)], mode: &ProbeMode, grid: &[f64]) -> Result<SweepCurve> {
    if subjects.is_empty() || grid.is_empty() {
        return Err(Error::Precondition("sweep needs subjects and thresholds".into()));
    }
    let mut thresholds = grid.to_vec();
    thresholds.sort_by(f64::total_cmp);

    let margins: Vec<(f64, String)> = subjects
        .iter()
        .map(|(scores, _)| {
            let margin = confidence(scores, mode)?;
            let accepted = match mode {
                ProbeMode::Targeted(t) => t.clone(),
                ProbeMode::Agnostic => predict_target(scores).unwrap_or_default().to_string(),
            };
            Ok((margin, accepted))
        })
        .collect::<Result<_>>()?;

    let mut accepted_correct = Vec::with_capacity(thresholds.len());
    let mut accepted_wrong = Vec::with_capacity(thresholds.len());
    for &t in &thresholds {
        let (mut correct, mut wrong) = (0, 0);
        for ((margin, accepted), (_, truth)) in margins.iter().zip(subjects) {
            if *margin >= t {
                if accepted == truth {
                    correct += 1;
                } else {
                    wrong += 1;
                }
            }
        }
        accepted_correct.push(correct);
        accepted_wrong.push(wrong);
    }
    Ok(SweepCurve {
        thresholds,
        accepted_correct,
        accepted_wrong,
        n_subjects: subjects.len(),
    })
}

/// Blank (unmanipulated) reference epochs: `count` distinct midpoints
/// between consecutive stimuli, drawn without replacement and returned in
/// time order.
pub fn sample_blank_events(schedule: &StimulusSchedule, count: usize, seed: u64) -> Result<Vec<StimulusEvent>> {
    let midpoints: Vec<f64> = schedule
        .events
        .windows(2)
        .map(|w| 0.5 * (w[0].end_s() + w[1].onset_s))
        .collect();
    if count > midpoints.len() {
        return Err(Error::Precondition(format!(
            "requested {count} blank epochs but the schedule has only {} gaps",
            midpoints.len()
        )));
    }
    let mut rng = seed::rng(seed);
    let mut picked = index::sample(&mut rng, midpoints.len(), count).into_vec();
    picked.sort_unstable();
    let duration = schedule.events.first().map_or(0.0133, |e| e.duration_s);
    Ok(picked
        .into_iter()
        .map(|i| StimulusEvent {
            onset_s: midpoints[i],
            duration_s: duration,
            candidate_id: BLANK_ID.to_string(),
            class_label: ClassLabel::Unknown,
            position: Position::Center,
        })
        .collect())
}

/// As many blank events as the schedule has contrast stimuli.
pub fn blank_events_for_video(schedule: &StimulusSchedule, seed: u64) -> Result<Vec<StimulusEvent>> {
    sample_blank_events(schedule, schedule.count(VIDEO_CONTRAST), seed)
}
