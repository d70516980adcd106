//! `VAF1` weight files.
//!
//! Layout: the magic `VAF1`, a little-endian `u32` header length, a JSON
//! header, then every layer's weights followed by its bias as little-endian
//! `f32`, in header order. The header carries the payload length and its
//! SHA-256.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::arch::{check_layers, layers_for, InputShape, LayerSpec};
use crate::error::{Error, Result};

pub const MAGIC: &[u8; 4] = b"VAF1";
pub const VERSION: u32 = 1;
const MAX_HEADER: usize = 1 << 20;
const MAX_DIM: usize = 1 << 16;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Header {
    pub version: u32,
    pub input: InputShape,
    pub layers: Vec<LayerSpec>,
    pub payload_len: u64,
    pub payload_sha256: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub config_digest: Option<String>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct LayerParams {
    pub weight: Vec<f32>,
    pub bias: Vec<f32>,
}

/// A loaded, architecture-checked network.
#[derive(Clone, Debug, PartialEq)]
pub struct Network {
    input: InputShape,
    layers: Vec<LayerSpec>,
    params: Vec<LayerParams>,
    config_digest: Option<String>,
}

fn check_input(input: InputShape) -> Result<()> {
    for (name, v) in [
        ("rows", input.rows),
        ("full_cols", input.full_cols),
        ("local_cols", input.local_cols),
    ] {
        if v == 0 || v > MAX_DIM {
            return Err(Error::Weights(format!("input {name} = {v} out of range")));
        }
    }
    Ok(())
}

impl Network {
    pub fn new(input: InputShape, params: Vec<LayerParams>) -> Result<Self> {
        check_input(input)?;
        let layers = layers_for(input)?;
        if params.len() != layers.len() {
            return Err(Error::Weights(format!(
                "expected {} layers of parameters, got {}",
                layers.len(),
                params.len()
            )));
        }
        for (spec, p) in layers.iter().zip(&params) {
            if p.weight.len() != spec.weight_len() {
                return Err(Error::Shape {
                    layer: spec.name.clone(),
                    expected: format!("{:?} weights", spec.weight_shape()),
                    actual: format!("{} values", p.weight.len()),
                });
            }
            if p.bias.len() != spec.bias_len() {
                return Err(Error::Shape {
                    layer: spec.name.clone(),
                    expected: format!("{} biases", spec.bias_len()),
                    actual: format!("{} values", p.bias.len()),
                });
            }
        }
        Ok(Network {
            input,
            layers,
            params,
            config_digest: None,
        })
    }

    /// Network whose every parameter is `value`.
    pub fn constant(input: InputShape, value: f32) -> Result<Self> {
        let params = layers_for(input)?
            .iter()
            .map(|l| LayerParams {
                weight: vec![value; l.weight_len()],
                bias: vec![value; l.bias_len()],
            })
            .collect();
        Self::new(input, params)
    }

    pub fn with_config_digest(mut self, digest: Option<String>) -> Self {
        self.config_digest = digest;
        self
    }

    pub fn input(&self) -> InputShape {
        self.input
    }

    pub fn layers(&self) -> &[LayerSpec] {
        &self.layers
    }

    pub fn params(&self) -> &[LayerParams] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [LayerParams] {
        &mut self.params
    }

    pub fn config_digest(&self) -> Option<&str> {
        self.config_digest.as_deref()
    }

    pub fn payload_len(&self) -> u64 {
        self.layers
            .iter()
            .map(|l| 4 * (l.weight_len() + l.bias_len()) as u64)
            .sum()
    }

    fn for_each_payload_chunk(&self, mut f: impl FnMut(&[u8]) -> std::io::Result<()>) -> std::io::Result<()> {
        let mut buf = Vec::with_capacity(1 << 16);
        for p in &self.params {
            for chunk in p.weight.chunks(1 << 14).chain(p.bias.chunks(1 << 14)) {
                buf.clear();
                for v in chunk {
                    buf.extend_from_slice(&v.to_le_bytes());
                }
                f(&buf)?;
            }
        }
        Ok(())
    }

    pub fn payload_sha256(&self) -> String {
        let mut h = Sha256::new();
        self.for_each_payload_chunk(|b| {
            h.update(b);
            Ok(())
        })
        .expect("hashing cannot fail");
        hex::encode(h.finalize())
    }

    pub fn header(&self) -> Header {
        Header {
            version: VERSION,
            input: self.input,
            layers: self.layers.clone(),
            payload_len: self.payload_len(),
            payload_sha256: self.payload_sha256(),
            config_digest: self.config_digest.clone(),
        }
    }

    pub fn write_to<W: Write>(&self, mut w: W) -> Result<()> {
        let header = serde_json::to_vec(&self.header()).expect("header serializes");
        let io = |e| Error::Weights(format!("write failed: {e}"));
        w.write_all(MAGIC).map_err(io)?;
        w.write_all(&(header.len() as u32).to_le_bytes()).map_err(io)?;
        w.write_all(&header).map_err(io)?;
        self.for_each_payload_chunk(|b| w.write_all(b)).map_err(io)?;
        w.flush().map_err(io)
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        self.write_to(&mut out).expect("writing to memory");
        out
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let f = File::create(path).map_err(|e| Error::io(path, e))?;
        self.write_to(BufWriter::new(f))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let f = File::open(path).map_err(|e| Error::io(path, e))?;
        Self::read_from(BufReader::with_capacity(1 << 20, f))
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        Self::read_from(bytes)
    }

    /// Reads and validates a `VAF1` stream: magic, version, wiring, sizes,
    /// then the payload checksum.
    pub fn read_from<R: Read>(mut r: R) -> Result<Self> {
        let header = read_header(&mut r)?;
        let expected_len: u64 = header
            .layers
            .iter()
            .map(|l| 4 * (l.weight_len() + l.bias_len()) as u64)
            .sum();
        if header.payload_len != expected_len {
            return Err(Error::Shape {
                layer: "<payload>".into(),
                expected: format!("{expected_len} bytes"),
                actual: format!("{} bytes declared", header.payload_len),
            });
        }

        let mut hasher = Sha256::new();
        let mut buf = vec![0u8; 1 << 16];
        let mut truncated = false;
        let mut params = Vec::with_capacity(header.layers.len());
        'layers: for spec in &header.layers {
            let mut layer = LayerParams {
                weight: Vec::new(),
                bias: Vec::new(),
            };
            for (target, count) in [(&mut layer.weight, spec.weight_len()), (&mut layer.bias, spec.bias_len())] {
                let mut remaining = count * 4;
                while remaining > 0 {
                    let want = remaining.min(buf.len());
                    let got = read_fully(&mut r, &mut buf[..want])?;
                    hasher.update(&buf[..got]);
                    target.extend(
                        buf[..got - got % 4]
                            .chunks_exact(4)
                            .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]])),
                    );
                    remaining -= got;
                    if got < want {
                        truncated = true;
                        break 'layers;
                    }
                }
            }
            params.push(layer);
        }
        let mut trailing = 0u64;
        if !truncated {
            loop {
                let got = read_fully(&mut r, &mut buf)?;
                hasher.update(&buf[..got]);
                trailing += got as u64;
                if got < buf.len() {
                    break;
                }
            }
        }
        let found = hex::encode(hasher.finalize());
        if truncated || trailing > 0 || !found.eq_ignore_ascii_case(&header.payload_sha256) {
            return Err(Error::Checksum {
                expected: header.payload_sha256,
                found,
            });
        }
        let net = Network::new(header.input, params)?;
        Ok(net.with_config_digest(header.config_digest))
    }
}

/// Reads magic, header length and header, and checks version and wiring.
pub fn read_header<R: Read>(r: &mut R) -> Result<Header> {
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic)
        .map_err(|_| Error::Weights("file too short for the magic".into()))?;
    if &magic != MAGIC {
        return Err(Error::Weights(format!("bad magic {magic:?}, expected VAF1")));
    }
    let mut len = [0u8; 4];
    r.read_exact(&mut len)
        .map_err(|_| Error::Weights("file too short for the header length".into()))?;
    let len = u32::from_le_bytes(len) as usize;
    if len > MAX_HEADER {
        return Err(Error::Weights(format!("header length {len} exceeds {MAX_HEADER}")));
    }
    let mut text = vec![0u8; len];
    r.read_exact(&mut text)
        .map_err(|_| Error::Weights("file too short for the declared header".into()))?;

    // Check the version before the rest of the schema.
    let raw: serde_json::Value = serde_json::from_slice(&text)
        .map_err(|e| Error::Weights(format!("header is not JSON: {e}")))?;
    match raw.get("version").and_then(serde_json::Value::as_u64) {
        Some(v) if v == u64::from(VERSION) => {}
        Some(v) => return Err(Error::Weights(format!("version mismatch: file {v}, supported {VERSION}"))),
        None => return Err(Error::Weights("header has no version".into())),
    }
    let header: Header = serde_path_to_error::deserialize(raw).map_err(|e| Error::Parse {
        at: format!("header.{}", e.path()),
        message: e.inner().to_string(),
    })?;
    check_input(header.input)?;
    check_layers(header.input, &header.layers)?;
    Ok(header)
}

fn read_fully<R: Read>(r: &mut R, buf: &mut [u8]) -> Result<usize> {
    let mut n = 0;
    while n < buf.len() {
        match r.read(&mut buf[n..]) {
            Ok(0) => break,
            Ok(k) => n += k,
            Err(e) if e.kind() == std::io::ErrorKind::Interrupted => {}
            Err(e) => return Err(Error::Weights(format!("read failed: {e}"))),
        }
    }
    Ok(n)
}
