//! `TTDC` chunk files.
//!
//! ```text
//! "TTDC" | u32 version | u32 header_len | JSON header
//! count x ( full: f16[3*rows*full_cols] | local: f16[3*rows*local_cols] | label: f32 )
//! sha256 of everything above (32 bytes)
//! ```
//!
//! All integers and floats are little-endian.

use std::fs::File;
use std::io::{BufReader, Read, Seek, SeekFrom, Write};
use std::path::Path;

use half::f16;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::{Provenance, Sample, Split};
use crate::error::{Error, Result};
use crate::vaf::InputShape;

pub const MAGIC: &[u8; 4] = b"TTDC";
pub const VERSION: u32 = 1;
const MAX_HEADER: usize = 64 << 20;
const DIGEST_LEN: u64 = 32;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChunkHeader {
    pub input: InputShape,
    pub split: Split,
    pub count: usize,
    pub provenance: Vec<Provenance>,
}

pub fn record_len(input: InputShape) -> u64 {
    2 * (input.full_len() + input.local_len()) as u64 + 4
}

/// Serializes a chunk. Callers check shapes beforehand.
pub fn encode(input: InputShape, split: Split, samples: &[Sample]) -> Vec<u8> {
    let header = ChunkHeader {
        input,
        split,
        count: samples.len(),
        provenance: samples.iter().map(|s| s.provenance.clone()).collect(),
    };
    let header = serde_json::to_vec(&header).expect("chunk header serializes");
    let mut out = Vec::with_capacity(12 + header.len() + samples.len() * record_len(input) as usize + 32);
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&(header.len() as u32).to_le_bytes());
    out.extend_from_slice(&header);
    for s in samples {
        for v in s.full.iter().chain(&s.local) {
            out.extend_from_slice(&f16::from_f32(*v).to_le_bytes());
        }
        out.extend_from_slice(&s.label.to_le_bytes());
    }
    let digest = Sha256::digest(&out);
    out.extend_from_slice(&digest);
    out
}

fn corrupt(msg: impl Into<String>) -> Error {
    Error::Dataset(msg.into())
}

fn read_prefix<R: Read>(r: &mut R) -> Result<(ChunkHeader, Vec<u8>)> {
    let mut fixed = [0u8; 12];
    r.read_exact(&mut fixed)
        .map_err(|_| corrupt("chunk shorter than its fixed header"))?;
    if &fixed[..4] != MAGIC {
        return Err(corrupt("bad chunk magic"));
    }
    let version = u32::from_le_bytes(fixed[4..8].try_into().expect("4 bytes"));
    if version != VERSION {
        return Err(corrupt(format!("chunk version {version}, supported {VERSION}")));
    }
    let len = u32::from_le_bytes(fixed[8..12].try_into().expect("4 bytes")) as usize;
    if len > MAX_HEADER {
        return Err(corrupt(format!("chunk header length {len} too large")));
    }
    let mut text = vec![0u8; len];
    r.read_exact(&mut text)
        .map_err(|_| corrupt("chunk shorter than its header"))?;
    let de = &mut serde_json::Deserializer::from_slice(&text);
    let header: ChunkHeader = serde_path_to_error::deserialize(de).map_err(|e| corrupt(format!("chunk header: {e}")))?;
    if header.provenance.len() != header.count {
        return Err(corrupt("chunk provenance count differs from sample count"));
    }
    let mut prefix = fixed.to_vec();
    prefix.extend_from_slice(&text);
    Ok((header, prefix))
}

/// A verified chunk: header plus the byte offset of its first record.
#[derive(Clone, Debug)]
pub struct ChunkInfo {
    pub header: ChunkHeader,
    pub records_at: u64,
}

/// Checks structure, size and digest by streaming through the file.
pub fn verify(path: &Path, expected_input: InputShape) -> Result<ChunkInfo> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let size = file.metadata().map_err(|e| Error::io(path, e))?.len();
    let mut r = BufReader::new(file);
    let (header, prefix) = read_prefix(&mut r)?;
    if header.input != expected_input {
        return Err(corrupt(format!(
            "chunk shape {:?} differs from the dataset's {:?}",
            header.input, expected_input
        )));
    }
    let records_at = prefix.len() as u64;
    let body = header.count as u64 * record_len(header.input);
    if size != records_at + body + DIGEST_LEN {
        return Err(corrupt(format!(
            "chunk is {size} bytes, expected {}",
            records_at + body + DIGEST_LEN
        )));
    }
    let mut hasher = Sha256::new();
    hasher.update(&prefix);
    let mut remaining = body;
    let mut buf = vec![0u8; body.min(1 << 20) as usize];
    while remaining > 0 {
        let n = remaining.min(buf.len() as u64) as usize;
        r.read_exact(&mut buf[..n]).map_err(|e| Error::io(path, e))?;
        hasher.update(&buf[..n]);
        remaining -= n as u64;
    }
    let mut digest = [0u8; 32];
    r.read_exact(&mut digest).map_err(|e| Error::io(path, e))?;
    if hasher.finalize().as_slice() != digest {
        return Err(corrupt("chunk digest mismatch"));
    }
    Ok(ChunkInfo { header, records_at })
}

/// Parses a whole chunk held in memory.
pub fn decode(bytes: &[u8]) -> Result<(ChunkHeader, Vec<Sample>)> {
    let mut r = bytes;
    let (header, prefix) = read_prefix(&mut r)?;
    let rec = record_len(header.input);
    let body = (header.count as u64)
        .checked_mul(rec)
        .ok_or_else(|| corrupt("chunk sample count overflows"))?;
    let expected = prefix.len() as u64 + body + DIGEST_LEN;
    if bytes.len() as u64 != expected {
        return Err(corrupt(format!("chunk is {} bytes, expected {expected}", bytes.len())));
    }
    let split = bytes.len() - DIGEST_LEN as usize;
    if Sha256::digest(&bytes[..split]).as_slice() != &bytes[split..] {
        return Err(corrupt("chunk digest mismatch"));
    }
    let samples = bytes[prefix.len()..split]
        .chunks_exact(rec as usize)
        .zip(&header.provenance)
        .map(|(b, p)| decode_record(header.input, b, p.clone()))
        .collect();
    Ok((header, samples))
}

pub(crate) fn decode_record(input: InputShape, b: &[u8], provenance: Provenance) -> Sample {
    let halves = |b: &[u8]| -> Vec<f32> {
        b.chunks_exact(2)
            .map(|c| f16::from_le_bytes([c[0], c[1]]).to_f32())
            .collect()
    };
    let nf = 2 * input.full_len();
    let nl = 2 * input.local_len();
    Sample {
        full: halves(&b[..nf]),
        local: halves(&b[nf..nf + nl]),
        label: f32::from_le_bytes(b[nf + nl..nf + nl + 4].try_into().expect("4 bytes")),
        provenance,
    }
}

/// Random access to the records of a verified chunk.
pub(crate) struct RecordReader {
    file: File,
    info: ChunkInfo,
    buf: Vec<u8>,
}

impl RecordReader {
    pub fn open(path: &Path, info: ChunkInfo) -> Result<Self> {
        let file = File::open(path).map_err(|e| Error::io(path, e))?;
        let buf = vec![0u8; record_len(info.header.input) as usize];
        Ok(RecordReader { file, info, buf })
    }

    pub fn read(&mut self, index: usize) -> std::io::Result<Sample> {
        let rec = self.buf.len() as u64;
        self.file
            .seek(SeekFrom::Start(self.info.records_at + index as u64 * rec))?;
        self.file.read_exact(&mut self.buf)?;
        Ok(decode_record(
            self.info.header.input,
            &self.buf,
            self.info.header.provenance[index].clone(),
        ))
    }
}

/// Writes `bytes` to `path` through a temporary file and a rename, so a
/// crash never leaves a partial file under the final name.
pub(crate) fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let tmp = path.with_extension("tmp");
    let mut f = File::create(&tmp).map_err(|e| Error::io(&tmp, e))?;
    f.write_all(bytes).map_err(|e| Error::io(&tmp, e))?;
    drop(f);
    std::fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
}
