//! Line-oriented text serialization of [`BoostedModel`].
//!
//! ```text
//! erprobe-blr-model v1
//! feature_dim <K>
//! ridge <lambda>
//! fingerprint <hex or ->
//! mean <K values>
//! scale <K values>
//! rounds <M>
//! gamma <g_1>
//! w <K + 1 values>
//! ...
//! ```
//!
//! Reals are written in scientific notation with 17 significant digits, so
//! every `f64` reads back bit-exact.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use super::{BoostedModel, Round, Standardizer, WeakLearner};
use crate::error::{Error, Result};

const MAGIC: &str = "erprobe-blr-model v1";

fn push_reals(out: &mut String, key: &str, values: &[f64]) {
    out.push_str(key);
    for v in values {
        write!(out, " {v:.16e}").unwrap();
    }
    out.push('\n');
}

impl BoostedModel {
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        writeln!(out, "{MAGIC}").unwrap();
        writeln!(out, "feature_dim {}", self.feature_dim).unwrap();
        push_reals(&mut out, "ridge", &[self.ridge]);
        let fp = if self.preprocessing_fingerprint.is_empty() {
            "-"
        } else {
            &self.preprocessing_fingerprint
        };
        writeln!(out, "fingerprint {fp}").unwrap();
        push_reals(&mut out, "mean", &self.standardizer.mean);
        push_reals(&mut out, "scale", &self.standardizer.scale);
        writeln!(out, "rounds {}", self.rounds.len()).unwrap();
        for round in &self.rounds {
            push_reals(&mut out, "gamma", &[round.gamma]);
            push_reals(&mut out, "w", &round.learner.w);
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut lines = text.lines().enumerate();
        let mut next = |key: &str| -> Result<(usize, Vec<&str>)> {
            let (no, line) = lines
                .next()
                .ok_or_else(|| Error::Parse(format!("model ends before {key:?}")))?;
            let mut fields = line.split_ascii_whitespace();
            match fields.next() {
                Some(k) if k == key => Ok((no + 1, fields.collect())),
                other => Err(Error::Parse(format!("line {}: expected {key:?}, found {other:?}", no + 1))),
            }
        };
        let reals = |no: usize, fields: &[&str], expected: usize| -> Result<Vec<f64>> {
            if fields.len() != expected {
                return Err(Error::Parse(format!("line {no}: expected {expected} values, found {}", fields.len())));
            }
            fields
                .iter()
                .map(|f| f.parse::<f64>().map_err(|e| Error::Parse(format!("line {no}: {f:?}: {e}"))))
                .collect()
        };
        let count = |no: usize, fields: &[&str]| -> Result<usize> {
            match fields {
                [v] => v.parse().map_err(|e| Error::Parse(format!("line {no}: {e}"))),
                _ => Err(Error::Parse(format!("line {no}: expected one integer"))),
            }
        };

        match text.lines().next() {
            Some(MAGIC) => {}
            other => return Err(Error::Parse(format!("not a model file (header {other:?})"))),
        }
        let (_, _) = next("erprobe-blr-model")?;
        let (no, f) = next("feature_dim")?;
        let k = count(no, &f)?;
        let (no, f) = next("ridge")?;
        let ridge = reals(no, &f, 1)?[0];
        let (no, f) = next("fingerprint")?;
        let fingerprint = match f.as_slice() {
            ["-"] => String::new(),
            [fp] => fp.to_string(),
            _ => return Err(Error::Parse(format!("line {no}: bad fingerprint"))),
        };
        let (no, f) = next("mean")?;
        let mean = reals(no, &f, k)?;
        let (no, f) = next("scale")?;
        let scale = reals(no, &f, k)?;
        let (no, f) = next("rounds")?;
        let m = count(no, &f)?;

        let mut model = BoostedModel {
            rounds: Vec::with_capacity(m),
            feature_dim: k,
            standardizer: Standardizer { mean, scale },
            ridge,
            preprocessing_fingerprint: fingerprint,
        };
        for _ in 0..m {
            let (no, f) = next("gamma")?;
            let gamma = reals(no, &f, 1)?[0];
            let (no, f) = next("w")?;
            let w = reals(no, &f, k + 1)?;
            model.rounds.push(Round {
                gamma,
                learner: WeakLearner { w },
            });
        }
        Ok(model)
    }
}

pub fn write_model(model: &BoostedModel, path: &Path) -> Result<()> {
    fs::write(path, model.to_text())?;
    Ok(())
}

pub fn read_model(path: &Path) -> Result<BoostedModel> {
    BoostedModel::from_text(&fs::read_to_string(path)?)
}
