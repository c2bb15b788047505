//! Shared fixtures for the criterion benches.

use erprobe::config::ExperimentConfig;
use erprobe::protocol::{build_counting_schedule, COUNTING_TARGET};
use erprobe::signal::{preprocess, DEFAULT_CHANNELS};
use erprobe::sim::synthesize_recording;
use erprobe::{LabeledDataset, Recording, StimulusSchedule, SubjectProfile};

pub struct CountingSession {
    pub config: ExperimentConfig,
    pub schedule: StimulusSchedule,
    pub recording: Recording,
    pub dataset: LabeledDataset,
}

/// One simulated counting session at default settings, preprocessed.
pub fn counting_session(seed: u64) -> CountingSession {
    let config = ExperimentConfig::default();
    let c = &config.protocol.counting;
    let schedule = build_counting_schedule(seed, c.stim_duration_s, c.isi_range_s).expect("schedule");
    let profile = SubjectProfile::with_defaults(&DEFAULT_CHANNELS, 8.0, 15.0, 25.0);
    let recording = synthesize_recording(&schedule, &profile, config.fs, &DEFAULT_CHANNELS, seed).expect("recording");
    let dataset = preprocess(&recording, &schedule, COUNTING_TARGET, &config.pipeline.preprocess).expect("preprocess");
    CountingSession {
        config,
        schedule,
        recording,
        dataset,
    }
}
