//! Recording container: a TOML header next to a raw payload of
//! little-endian `f32` samples, channel-major.

use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use super::Recording;
use crate::error::{Error, Result};

const FORMAT: &str = "erprobe-recording-v1";

#[derive(Debug, Serialize, Deserialize)]
struct Header {
    format: String,
    fs: f64,
    n_channels: usize,
    n_samples: usize,
    channel_labels: Vec<String>,
    sample_format: String,
    layout: String,
    payload: String,
}

/// Payload sits next to the header with extension `f32`.
pub fn payload_path(header: &Path) -> PathBuf {
    header.with_extension("f32")
}

pub fn write_recording(recording: &Recording, header_path: &Path) -> Result<()> {
    let payload = payload_path(header_path);
    let header = Header {
        format: FORMAT.into(),
        fs: recording.fs,
        n_channels: recording.n_channels(),
        n_samples: recording.n_samples(),
        channel_labels: recording.channel_labels.clone(),
        sample_format: "f32le".into(),
        layout: "channel-major".into(),
        payload: payload
            .file_name()
            .and_then(|n| n.to_str())
            .ok_or_else(|| Error::Config(format!("bad header path {}", header_path.display())))?
            .to_string(),
    };
    let text = toml::to_string(&header).map_err(|e| Error::Parse(e.to_string()))?;
    fs::write(header_path, text)?;

    let mut w = BufWriter::new(fs::File::create(&payload)?);
    // Standard layout rows are channels, so iteration is channel-major.
    for v in recording.samples.iter() {
        w.write_all(&(*v as f32).to_le_bytes())?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_recording(header_path: &Path) -> Result<Recording> {
    let text = fs::read_to_string(header_path)?;
    let header: Header = toml::from_str(&text).map_err(|e| Error::Parse(format!("{}: {e}", header_path.display())))?;
    if header.format != FORMAT || header.sample_format != "f32le" || header.layout != "channel-major" {
        return Err(Error::Parse(format!(
            "unsupported recording format {} / {} / {}",
            header.format, header.sample_format, header.layout
        )));
    }
    if header.channel_labels.len() != header.n_channels {
        return Err(Error::DimensionMismatch {
            expected: header.n_channels,
            got: header.channel_labels.len(),
        });
    }
    let payload_file = header_path.with_file_name(&header.payload);
    let bytes = fs::read(&payload_file)?;
    let expected = header.n_channels * header.n_samples * 4;
    if bytes.len() != expected {
        return Err(Error::DimensionMismatch {
            expected,
            got: bytes.len(),
        });
    }
    let values: Vec<f64> = bytes
        .chunks_exact(4)
        .map(|b| f32::from_le_bytes([b[0], b[1], b[2], b[3]]) as f64)
        .collect();
    let samples = Array2::from_shape_vec((header.n_channels, header.n_samples), values)
        .map_err(|e| Error::Parse(e.to_string()))?;
    Recording::new(header.fs, header.channel_labels, samples)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_and_layout() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("rec.hdr");
        let samples = Array2::from_shape_fn((3, 5), |(c, i)| c as f64 * 10.0 + i as f64 + 0.5);
        let rec = Recording::new(256.0, vec!["a".into(), "b".into(), "c".into()], samples).unwrap();
        write_recording(&rec, &path).unwrap();

        let raw = fs::read(payload_path(&path)).unwrap();
        assert_eq!(raw.len(), 60);
        // Channel 0's samples come first.
        assert_eq!(f32::from_le_bytes(raw[4..8].try_into().unwrap()), 1.5);
        assert_eq!(f32::from_le_bytes(raw[20..24].try_into().unwrap()), 10.5);

        let back = read_recording(&path).unwrap();
        assert_eq!(back, rec);
    }

    #[test]
    fn truncated_payload_is_an_error() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("rec.hdr");
        let rec = Recording::new(256.0, vec!["a".into()], Array2::zeros((1, 8))).unwrap();
        write_recording(&rec, &path).unwrap();
        fs::write(payload_path(&path), [0u8; 7]).unwrap();
        assert!(matches!(read_recording(&path), Err(Error::DimensionMismatch { .. })));
    }
}
