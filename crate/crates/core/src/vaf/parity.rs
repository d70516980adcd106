//! Parity files: reference outputs of another inference implementation for a
//! set of inputs, to be reproduced by this engine within a tolerance.
//!
//! Weights come either from a `VAF1` file next to the parity file or from
//! the seeded generator in [`super::synth`], pinned by the payload digest.
//! Inputs are either explicit arrays or `(input_seed, vector)` pairs for the
//! same generator.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::arch::InputShape;
use super::synth;
use super::weights::Network;
use crate::error::{Error, Result};

pub const FORMAT: &str = "vaf-parity/1";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged, deny_unknown_fields)]
pub enum WeightSource {
    File { file: PathBuf },
    Synth { synth_seed: u64, payload_sha256: String },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged, deny_unknown_fields)]
pub enum ParityInput {
    Explicit { full: Vec<f32>, local: Vec<f32> },
    Seeded { input_seed: u64, vector: u64 },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ParityVector {
    #[serde(flatten)]
    pub input: ParityInput,
    pub output: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParityFile {
    pub format: String,
    pub weights: WeightSource,
    pub input: InputShape,
    pub tolerance: f64,
    pub vectors: Vec<ParityVector>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ParityReport {
    pub expected: Vec<f64>,
    pub actual: Vec<f32>,
    pub tolerance: f64,
}

impl ParityReport {
    pub fn max_abs_error(&self) -> f64 {
        self.expected
            .iter()
            .zip(&self.actual)
            .map(|(e, a)| (e - f64::from(*a)).abs())
            .fold(0.0, f64::max)
    }

    /// Vectors within tolerance. NaN outputs never pass.
    pub fn passed(&self) -> usize {
        self.expected
            .iter()
            .zip(&self.actual)
            .filter(|(e, a)| (*e - f64::from(**a)).abs() <= self.tolerance)
            .count()
    }

    pub fn all_passed(&self) -> bool {
        !self.expected.is_empty() && self.passed() == self.expected.len()
    }
}

impl ParityFile {
    pub fn from_json(text: &str) -> Result<Self> {
        let de = &mut serde_json::Deserializer::from_str(text);
        let doc: ParityFile = serde_path_to_error::deserialize(de).map_err(Error::from_json)?;
        if doc.format != FORMAT {
            return Err(Error::Parse {
                at: "format".into(),
                message: format!("expected `{FORMAT}`, found `{}`", doc.format),
            });
        }
        if doc.tolerance.is_nan() || doc.tolerance < 0.0 {
            return Err(Error::Parse {
                at: "tolerance".into(),
                message: "must be a non-negative number".into(),
            });
        }
        Ok(doc)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }

    /// Loads or regenerates the weights. Relative file paths resolve against
    /// `base`.
    pub fn network(&self, base: &Path) -> Result<Network> {
        let net = match &self.weights {
            WeightSource::File { file } => Network::load(&base.join(file))?,
            WeightSource::Synth {
                synth_seed,
                payload_sha256,
            } => {
                let net = synth::network(self.input, *synth_seed)?;
                let found = net.payload_sha256();
                if !found.eq_ignore_ascii_case(payload_sha256) {
                    return Err(Error::Checksum {
                        expected: payload_sha256.clone(),
                        found,
                    });
                }
                net
            }
        };
        if net.input() != self.input {
            return Err(Error::Shape {
                layer: "full_conv1".into(),
                expected: format!("{:?}", self.input),
                actual: format!("{:?}", net.input()),
            });
        }
        Ok(net)
    }

    pub fn check(&self, net: &Network) -> Result<ParityReport> {
        let mut actual = Vec::with_capacity(self.vectors.len());
        for v in &self.vectors {
            let y = match &v.input {
                ParityInput::Explicit { full, local } => net.forward(full, local)?,
                ParityInput::Seeded { input_seed, vector } => {
                    let (full, local) = synth::input_pair(self.input, *input_seed, *vector);
                    net.forward(&full, &local)?
                }
            };
            actual.push(y);
        }
        Ok(ParityReport {
            expected: self.vectors.iter().map(|v| v.output).collect(),
            actual,
            tolerance: self.tolerance,
        })
    }
}

/// Loads a parity file and its weights and runs every vector.
pub fn run(path: &Path) -> Result<ParityReport> {
    let doc = ParityFile::load(path)?;
    let base = path.parent().unwrap_or(Path::new("."));
    doc.check(&doc.network(base)?)
}
