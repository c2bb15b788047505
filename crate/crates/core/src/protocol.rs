//! Stimulus schedules for the counting calibration task and the video probe.
//!
//! A schedule is a sorted, non-overlapping list of timed stimulus events.
//! Counting sessions flash the digits `0..=10` in random order; the digit `1`
//! is the counted (target) digit. Video sessions hide a brief stimulus every
//! `period_s` seconds: every fourth one is the probed target, shown top
//! right, and the rest are contrast stimuli rotating over the other corners.

use std::fmt;
use std::io::{Read, Write};
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::seed;

pub const COUNTING_TARGET: &str = "1";
pub const VIDEO_TARGET: &str = "target";
pub const VIDEO_CONTRAST: &str = "contrast";

/// CSV header of the schedule interchange format.
pub const CSV_HEADER: [&str; 5] = ["onset_s", "duration_s", "candidate_id", "class_label", "position"];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum SessionKind {
    Counting,
    Video,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ClassLabel {
    Target,
    NonTarget,
    Unknown,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Position {
    TopLeft,
    TopRight,
    BottomLeft,
    BottomRight,
    Center,
}

/// Rotation order of contrast stimuli over the non-target corners.
pub const CONTRAST_CORNERS: [Position; 3] = [Position::TopLeft, Position::BottomLeft, Position::BottomRight];

macro_rules! text_enum {
    ($ty:ty { $($variant:ident => $text:literal),+ $(,)? }) => {
        impl $ty {
            pub fn as_str(self) -> &'static str {
                match self { $(Self::$variant => $text),+ }
            }
        }

        impl fmt::Display for $ty {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(self.as_str())
            }
        }

        impl FromStr for $ty {
            type Err = Error;

            fn from_str(s: &str) -> Result<Self> {
                match s {
                    $($text => Ok(Self::$variant),)+
                    other => Err(Error::Parse(format!(concat!("invalid ", stringify!($ty), " {:?}"), other))),
                }
            }
        }
    };
}

text_enum!(SessionKind { Counting => "counting", Video => "video" });
text_enum!(ClassLabel { Target => "target", NonTarget => "non_target", Unknown => "unknown" });
text_enum!(Position {
    TopLeft => "top_left",
    TopRight => "top_right",
    BottomLeft => "bottom_left",
    BottomRight => "bottom_right",
    Center => "center",
});

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StimulusEvent {
    pub onset_s: f64,
    pub duration_s: f64,
    pub candidate_id: String,
    pub class_label: ClassLabel,
    pub position: Position,
}

impl StimulusEvent {
    pub fn end_s(&self) -> f64 {
        self.onset_s + self.duration_s
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StimulusSchedule {
    pub session_kind: SessionKind,
    pub events: Vec<StimulusEvent>,
    pub total_duration_s: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CountingConfig {
    pub stim_duration_s: f64,
    pub isi_range_s: (f64, f64),
}

impl Default for CountingConfig {
    fn default() -> Self {
        Self {
            stim_duration_s: 0.25,
            isi_range_s: (0.25, 0.375),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct VideoConfig {
    pub duration_s: f64,
    pub period_s: f64,
    pub stim_duration_s: f64,
}

impl Default for VideoConfig {
    fn default() -> Self {
        Self {
            duration_s: 900.0,
            period_s: 5.0,
            stim_duration_s: 0.0133,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ProtocolConfig {
    pub counting: CountingConfig,
    pub video: VideoConfig,
}

/// Counting calibration: each digit except `1` appears 16 times, `1` appears
/// between 14 and 18 times, in uniformly random order with uniform random
/// pauses drawn from `isi_range_s` before every stimulus.
pub fn build_counting_schedule(seed: u64, stim_duration_s: f64, isi_range_s: (f64, f64)) -> Result<StimulusSchedule> {
    let (isi_lo, isi_hi) = isi_range_s;
    if !(isi_lo.is_finite() && isi_hi.is_finite() && isi_lo >= 0.0 && isi_lo <= isi_hi) {
        return Err(Error::Config(format!("invalid ISI interval [{isi_lo}, {isi_hi}]")));
    }
    if !(stim_duration_s.is_finite() && stim_duration_s > 0.0) {
        return Err(Error::Config(format!("stimulus duration must be positive, got {stim_duration_s}")));
    }

    let mut rng = seed::rng(seed);
    let n_ones = rng.random_range(14..=18usize);
    let mut ids: Vec<u32> = (0..=10u32)
        .flat_map(|d| std::iter::repeat_n(d, if d == 1 { n_ones } else { 16 }))
        .collect();
    ids.shuffle(&mut rng);

    let mut events = Vec::with_capacity(ids.len());
    let mut t = 0.0;
    for id in ids {
        t += draw_isi(&mut rng, isi_lo, isi_hi);
        let target = id == 1;
        events.push(StimulusEvent {
            onset_s: t,
            duration_s: stim_duration_s,
            candidate_id: id.to_string(),
            class_label: if target { ClassLabel::Target } else { ClassLabel::NonTarget },
            position: Position::Center,
        });
        t += stim_duration_s;
    }
    Ok(StimulusSchedule {
        session_kind: SessionKind::Counting,
        events,
        total_duration_s: t,
    })
}

fn draw_isi(rng: &mut impl Rng, lo: f64, hi: f64) -> f64 {
    if lo == hi {
        lo
    } else {
        rng.random_range(lo..=hi)
    }
}

/// Video probe: onsets at `k * period_s` for `k = 1..=floor(duration/period)`.
/// Event `k` is the target (top right) iff `k % 4 == 0`; the others are
/// contrast stimuli cycling through [`CONTRAST_CORNERS`]. The layout is fully
/// determined by the configuration, so no seed is involved.
pub fn build_video_schedule(duration_s: f64, period_s: f64, stim_duration_s: f64) -> Result<StimulusSchedule> {
    if !(period_s.is_finite() && period_s > 0.0) {
        return Err(Error::Config(format!("period must be positive, got {period_s}")));
    }
    if !(duration_s.is_finite() && duration_s >= period_s) {
        return Err(Error::Config(format!("duration {duration_s} s is shorter than period {period_s} s")));
    }
    if !(stim_duration_s.is_finite() && stim_duration_s > 0.0 && stim_duration_s < period_s) {
        return Err(Error::Config(format!("stimulus duration {stim_duration_s} s must lie in (0, period)")));
    }

    let n = (duration_s / period_s + 1e-9).floor() as usize;
    let mut contrast_index = 0usize;
    let events: Vec<StimulusEvent> = (1..=n)
        .map(|k| {
            let (candidate, class_label, position) = if k % 4 == 0 {
                (VIDEO_TARGET, ClassLabel::Target, Position::TopRight)
            } else {
                let pos = CONTRAST_CORNERS[contrast_index % CONTRAST_CORNERS.len()];
                contrast_index += 1;
                (VIDEO_CONTRAST, ClassLabel::NonTarget, pos)
            };
            StimulusEvent {
                onset_s: k as f64 * period_s,
                duration_s: stim_duration_s,
                candidate_id: candidate.to_string(),
                class_label,
                position,
            }
        })
        .collect();
    let last_end = events.last().map_or(0.0, StimulusEvent::end_s);
    Ok(StimulusSchedule {
        session_kind: SessionKind::Video,
        events,
        total_duration_s: duration_s.max(last_end),
    })
}

#[derive(Debug, Clone, PartialEq)]
pub enum Violation {
    NegativeOnset { index: usize },
    NonPositiveDuration { index: usize },
    Unsorted { index: usize },
    Overlap { index: usize },
    ExceedsDuration { index: usize },
    ForeignCandidate { index: usize, candidate_id: String },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::NegativeOnset { index } => write!(f, "event {index}: negative onset"),
            Violation::NonPositiveDuration { index } => write!(f, "event {index}: non-positive duration"),
            Violation::Unsorted { index } => write!(f, "event {index}: onset precedes previous event"),
            Violation::Overlap { index } => write!(f, "event {index}: overlaps previous event"),
            Violation::ExceedsDuration { index } => write!(f, "event {index}: ends after total duration"),
            Violation::ForeignCandidate { index, candidate_id } => {
                write!(f, "event {index}: candidate {candidate_id:?} not allowed in this session kind")
            }
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.violations.is_empty()
    }
}

fn candidate_allowed(kind: SessionKind, id: &str) -> bool {
    match kind {
        SessionKind::Counting => matches!(id, "0" | "1" | "2" | "3" | "4" | "5" | "6" | "7" | "8" | "9" | "10"),
        SessionKind::Video => id == VIDEO_TARGET || id == VIDEO_CONTRAST,
    }
}

pub fn validate_schedule(schedule: &StimulusSchedule) -> ValidationReport {
    let mut violations = Vec::new();
    for (index, ev) in schedule.events.iter().enumerate() {
        if !(ev.onset_s >= 0.0) {
            violations.push(Violation::NegativeOnset { index });
        }
        if !(ev.duration_s > 0.0) {
            violations.push(Violation::NonPositiveDuration { index });
        }
        if index > 0 {
            let prev = &schedule.events[index - 1];
            if ev.onset_s < prev.onset_s {
                violations.push(Violation::Unsorted { index });
            } else if ev.onset_s < prev.end_s() {
                violations.push(Violation::Overlap { index });
            }
        }
        if ev.end_s() > schedule.total_duration_s + 1e-9 {
            violations.push(Violation::ExceedsDuration { index });
        }
        if !candidate_allowed(schedule.session_kind, &ev.candidate_id) {
            violations.push(Violation::ForeignCandidate {
                index,
                candidate_id: ev.candidate_id.clone(),
            });
        }
    }
    ValidationReport { violations }
}

impl StimulusSchedule {
    /// Writes the CSV interchange format (LF line endings, 9 fractional digits).
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(writer);
        let csv_err = |e: csv::Error| Error::Io(std::io::Error::other(e));
        w.write_record(CSV_HEADER).map_err(csv_err)?;
        for ev in &self.events {
            w.write_record([
                format!("{:.9}", ev.onset_s),
                format!("{:.9}", ev.duration_s),
                ev.candidate_id.clone(),
                ev.class_label.to_string(),
                ev.position.to_string(),
            ])
            .map_err(csv_err)?;
        }
        w.flush()?;
        Ok(())
    }

    /// Reads the CSV interchange format. The session kind is not part of the
    /// file and is inferred from the candidate ids; the total duration is the
    /// end of the last event, or `total_duration_s` when given and larger.
    pub fn read_csv<R: Read>(reader: R, total_duration_s: Option<f64>) -> Result<Self> {
        let mut r = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
        let headers = r.headers().map_err(|e| Error::Parse(e.to_string()))?.clone();
        if headers.iter().ne(CSV_HEADER.iter().copied()) {
            return Err(Error::Parse(format!("unexpected schedule header {:?}", headers)));
        }
        let mut events = Vec::new();
        for (line, rec) in r.records().enumerate() {
            let rec = rec.map_err(|e| Error::Parse(e.to_string()))?;
            let field = |i: usize| rec.get(i).unwrap_or_default();
            let num = |i: usize| {
                field(i)
                    .parse::<f64>()
                    .map_err(|e| Error::Parse(format!("row {}: {}: {e}", line + 1, CSV_HEADER[i])))
            };
            events.push(StimulusEvent {
                onset_s: num(0)?,
                duration_s: num(1)?,
                candidate_id: field(2).to_string(),
                class_label: field(3).parse()?,
                position: field(4).parse()?,
            });
        }
        let session_kind = if !events.is_empty() && events.iter().all(|e| candidate_allowed(SessionKind::Video, &e.candidate_id)) {
            SessionKind::Video
        } else {
            SessionKind::Counting
        };
        let last_end = events.last().map_or(0.0, StimulusEvent::end_s);
        Ok(Self {
            session_kind,
            events,
            total_duration_s: total_duration_s.unwrap_or(0.0).max(last_end),
        })
    }

    pub fn candidate_ids(&self) -> Vec<&str> {
        let mut ids: Vec<&str> = self.events.iter().map(|e| e.candidate_id.as_str()).collect();
        ids.sort_unstable();
        ids.dedup();
        ids
    }

    pub fn count(&self, candidate_id: &str) -> usize {
        self.events.iter().filter(|e| e.candidate_id == candidate_id).count()
    }
}
