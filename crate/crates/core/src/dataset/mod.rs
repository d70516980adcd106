//! On-disk store of encoded states and their node values.
//!
//! A dataset is a directory with `manifest.json` and `chunk_%05d.bin` files.
//! Arrays are stored as 16-bit floats, so they round-trip exactly at half
//! precision; labels are 32-bit floats. Each instance id is assigned to the
//! train or test split when first seen: every fifth distinct instance goes
//! to test, giving one test instance per four training instances.

pub mod chunk;

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::planner::{ChildSample, LabelKind, SampleSink, Variant};
use crate::sim::Simulator;
use crate::vaf::encode::{encode, ENCODER_VERSION};
use crate::vaf::InputShape;

pub const FORMAT: &str = "ttp-dataset/1";
pub const MANIFEST: &str = "manifest.json";
/// Every `TEST_EVERY`-th distinct instance is held out for testing.
pub const TEST_EVERY: usize = 5;
pub const FOCUS_TIME: &str = "arrival_at_cursor_station";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Test,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Provenance {
    pub instance_id: String,
    pub step: u32,
    pub action: u32,
    pub variant: Variant,
    pub label_kind: LabelKind,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Sample {
    pub full: Vec<f32>,
    pub local: Vec<f32>,
    pub label: f32,
    pub provenance: Provenance,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChunkEntry {
    pub file: String,
    pub split: Split,
    pub samples: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Manifest {
    pub format: String,
    pub encoder_version: u32,
    pub input: InputShape,
    pub array_dtype: String,
    pub label_dtype: String,
    pub label_kind: LabelKind,
    pub focus_time: String,
    pub test_every: usize,
    /// Instance ids in first-seen order with their split.
    pub instances: Vec<(String, Split)>,
    pub chunks: Vec<ChunkEntry>,
}

impl Manifest {
    /// Parses a manifest and checks its format and encoder version.
    pub fn from_json(text: &str) -> Result<Self> {
        let de = &mut serde_json::Deserializer::from_str(text);
        let manifest: Manifest = serde_path_to_error::deserialize(de).map_err(Error::from_json)?;
        if manifest.format != FORMAT {
            return Err(Error::Dataset(format!("unsupported format `{}`", manifest.format)));
        }
        if manifest.encoder_version != ENCODER_VERSION {
            return Err(Error::Dataset(format!(
                "encoder version {} differs from {ENCODER_VERSION}",
                manifest.encoder_version
            )));
        }
        Ok(manifest)
    }

    pub fn samples(&self, split: Split) -> usize {
        self.chunks
            .iter()
            .filter(|c| c.split == split)
            .map(|c| c.samples)
            .sum()
    }
}

/// Full batches and the size of the trailing partial batch.
pub fn batch_counts(samples: usize, batch_size: usize) -> (usize, usize) {
    assert!(batch_size >= 1, "batch size must be at least 1");
    (samples / batch_size, samples % batch_size)
}

/// Split of the `n`-th (0-based) distinct instance.
pub fn split_for_ordinal(n: usize) -> Split {
    if n % TEST_EVERY == TEST_EVERY - 1 {
        Split::Test
    } else {
        Split::Train
    }
}

pub struct Dataset {
    dir: PathBuf,
    manifest: Manifest,
    index: BTreeMap<String, Split>,
}

impl Dataset {
    pub fn create(dir: &Path, input: InputShape, label_kind: LabelKind) -> Result<Self> {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let path = dir.join(MANIFEST);
        if path.exists() {
            return Err(Error::Dataset(format!("{} already exists", path.display())));
        }
        let manifest = Manifest {
            format: FORMAT.into(),
            encoder_version: ENCODER_VERSION,
            input,
            array_dtype: "f16le".into(),
            label_dtype: "f32le".into(),
            label_kind,
            focus_time: FOCUS_TIME.into(),
            test_every: TEST_EVERY,
            instances: Vec::new(),
            chunks: Vec::new(),
        };
        let ds = Dataset {
            dir: dir.to_path_buf(),
            manifest,
            index: BTreeMap::new(),
        };
        ds.write_manifest()?;
        Ok(ds)
    }

    pub fn open(dir: &Path) -> Result<Self> {
        let path = dir.join(MANIFEST);
        let text = std::fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
        let manifest = Manifest::from_json(&text)?;
        let index = manifest.instances.iter().cloned().collect();
        Ok(Dataset {
            dir: dir.to_path_buf(),
            manifest,
            index,
        })
    }

    /// Opens the dataset in `dir`, creating it when there is no manifest.
    /// An existing dataset must match `input` and `label_kind`.
    pub fn open_or_create(dir: &Path, input: InputShape, label_kind: LabelKind) -> Result<Self> {
        if !dir.join(MANIFEST).exists() {
            return Self::create(dir, input, label_kind);
        }
        let ds = Self::open(dir)?;
        if ds.manifest.input != input || ds.manifest.label_kind != label_kind {
            return Err(Error::Dataset(format!(
                "existing dataset holds {:?} / {:?} samples",
                ds.manifest.input, ds.manifest.label_kind
            )));
        }
        Ok(ds)
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn manifest(&self) -> &Manifest {
        &self.manifest
    }

    /// Split of `instance_id`, assigning one if the id is new.
    pub fn split_of(&mut self, instance_id: &str) -> Split {
        if let Some(s) = self.index.get(instance_id) {
            return *s;
        }
        let s = split_for_ordinal(self.manifest.instances.len());
        self.manifest.instances.push((instance_id.to_string(), s));
        self.index.insert(instance_id.to_string(), s);
        s
    }

    fn check_sample(&self, s: &Sample) -> Result<()> {
        let input = self.manifest.input;
        if s.full.len() != input.full_len() || s.local.len() != input.local_len() {
            return Err(Error::Shape {
                layer: "dataset".into(),
                expected: format!("{} + {} values", input.full_len(), input.local_len()),
                actual: format!("{} + {} values", s.full.len(), s.local.len()),
            });
        }
        if !s.label.is_finite() || !s.full.iter().chain(&s.local).all(|v| v.is_finite()) {
            return Err(Error::Dataset(format!(
                "non-finite value in sample from {} step {}",
                s.provenance.instance_id, s.provenance.step
            )));
        }
        if s.provenance.label_kind != self.manifest.label_kind {
            return Err(Error::Dataset(format!(
                "sample label kind {:?}, dataset holds {:?}",
                s.provenance.label_kind, self.manifest.label_kind
            )));
        }
        Ok(())
    }

    /// Writes the samples as one chunk per split, then the manifest. Every
    /// sample is checked before anything is written.
    pub fn append(&mut self, samples: &[Sample]) -> Result<()> {
        for s in samples {
            self.check_sample(s)?;
        }
        let mut groups: BTreeMap<Split, Vec<Sample>> = BTreeMap::new();
        for s in samples {
            let split = self.split_of(&s.provenance.instance_id);
            groups.entry(split).or_default().push(s.clone());
        }
        for (split, group) in groups {
            let file = format!("chunk_{:05}.bin", self.manifest.chunks.len());
            let bytes = chunk::encode(self.manifest.input, split, &group);
            chunk::write_atomic(&self.dir.join(&file), &bytes)?;
            self.manifest.chunks.push(ChunkEntry {
                file,
                split,
                samples: group.len(),
            });
        }
        self.write_manifest()
    }

    fn write_manifest(&self) -> Result<()> {
        let text = serde_json::to_string_pretty(&self.manifest).expect("manifest serializes");
        chunk::write_atomic(&self.dir.join(MANIFEST), format!("{text}\n").as_bytes())
    }

    /// Verifies every chunk of `split`. Corrupt or missing chunks are
    /// skipped with a warning and counted.
    pub fn reader(&self, split: Split) -> Result<Reader> {
        let mut chunks = Vec::new();
        let mut corrupt = 0;
        for entry in self.manifest.chunks.iter().filter(|c| c.split == split) {
            let path = self.dir.join(&entry.file);
            match chunk::verify(&path, self.manifest.input) {
                Ok(info) if info.header.count == entry.samples && info.header.split == split => {
                    chunks.push((path, info));
                }
                Ok(_) => {
                    log::warn!("skipping {}: contents disagree with the manifest", path.display());
                    corrupt += 1;
                }
                Err(e) => {
                    log::warn!("skipping {}: {e}", path.display());
                    corrupt += 1;
                }
            }
        }
        Ok(Reader { chunks, corrupt })
    }
}

/// Verified chunks of one split.
pub struct Reader {
    chunks: Vec<(PathBuf, chunk::ChunkInfo)>,
    corrupt: usize,
}

impl Reader {
    pub fn len(&self) -> usize {
        self.chunks.iter().map(|(_, c)| c.header.count).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn corrupt_chunks(&self) -> usize {
        self.corrupt
    }

    /// Batches over a seeded permutation of all samples. The last batch
    /// holds the remainder when the sample count is not a multiple of
    /// `batch_size`.
    pub fn batches(&self, batch_size: usize, shuffle_seed: u64) -> Result<Batches> {
        if batch_size == 0 {
            return Err(Error::Dataset("batch size must be at least 1".into()));
        }
        let mut order: Vec<(usize, usize)> = self
            .chunks
            .iter()
            .enumerate()
            .flat_map(|(c, (_, info))| (0..info.header.count).map(move |i| (c, i)))
            .collect();
        order.shuffle(&mut ChaCha8Rng::seed_from_u64(shuffle_seed));
        let readers = self
            .chunks
            .iter()
            .map(|(p, info)| chunk::RecordReader::open(p, info.clone()))
            .collect::<Result<_>>()?;
        Ok(Batches {
            readers,
            order,
            pos: 0,
            batch_size,
        })
    }

    /// Every sample in chunk order.
    pub fn read_all(&self) -> Result<Vec<Sample>> {
        let mut out = Vec::with_capacity(self.len());
        for (path, info) in &self.chunks {
            let mut r = chunk::RecordReader::open(path, info.clone())?;
            for i in 0..info.header.count {
                out.push(r.read(i).map_err(|e| Error::io(path, e))?);
            }
        }
        Ok(out)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Batch {
    pub len: usize,
    /// `len` rows of the full-frame array, concatenated.
    pub full: Vec<f32>,
    pub local: Vec<f32>,
    pub labels: Vec<f32>,
    pub provenance: Vec<Provenance>,
}

pub struct Batches {
    readers: Vec<chunk::RecordReader>,
    order: Vec<(usize, usize)>,
    pos: usize,
    batch_size: usize,
}

impl Iterator for Batches {
    type Item = Result<Batch>;

    fn next(&mut self) -> Option<Self::Item> {
        if self.pos >= self.order.len() {
            return None;
        }
        let end = (self.pos + self.batch_size).min(self.order.len());
        let mut batch = Batch {
            len: end - self.pos,
            full: Vec::new(),
            local: Vec::new(),
            labels: Vec::with_capacity(end - self.pos),
            provenance: Vec::with_capacity(end - self.pos),
        };
        for &(c, i) in &self.order[self.pos..end] {
            match self.readers[c].read(i) {
                Ok(s) => {
                    batch.full.extend_from_slice(&s.full);
                    batch.local.extend_from_slice(&s.local);
                    batch.labels.push(s.label);
                    batch.provenance.push(s.provenance);
                }
                Err(e) => {
                    self.pos = self.order.len();
                    return Some(Err(Error::Dataset(format!("chunk read failed: {e}"))));
                }
            }
        }
        self.pos = end;
        Some(Ok(batch))
    }
}

/// Planner sample sink that encodes each visited root child and appends
/// full chunks to a dataset.
pub struct Collector<'d> {
    dataset: &'d mut Dataset,
    instance_id: String,
    variant: Variant,
    chunk_samples: usize,
    pending: Vec<Sample>,
    written: usize,
}

impl<'d> Collector<'d> {
    pub fn new(dataset: &'d mut Dataset, instance_id: impl Into<String>, variant: Variant) -> Self {
        Collector {
            dataset,
            instance_id: instance_id.into(),
            variant,
            chunk_samples: 64,
            pending: Vec::new(),
            written: 0,
        }
    }

    pub fn with_chunk_samples(mut self, n: usize) -> Self {
        self.chunk_samples = n.max(1);
        self
    }

    /// Writes what is buffered and returns the total sample count.
    pub fn finish(mut self) -> Result<usize> {
        self.flush()?;
        Ok(self.written)
    }

    fn flush(&mut self) -> Result<()> {
        if !self.pending.is_empty() {
            self.dataset.append(&self.pending)?;
            self.written += self.pending.len();
            self.pending.clear();
        }
        Ok(())
    }
}

impl SampleSink for Collector<'_> {
    fn accept(&mut self, sim: &Simulator, sample: ChildSample<'_>) -> Result<()> {
        let input = self.dataset.manifest.input;
        let e = encode(sim, input, sample.state, Some(sample.parent), sample.grandparent)?;
        self.pending.push(Sample {
            full: e.full,
            local: e.local,
            label: sample.label as f32,
            provenance: Provenance {
                instance_id: self.instance_id.clone(),
                step: sample.step as u32,
                action: sample.action,
                variant: self.variant,
                label_kind: self.dataset.manifest.label_kind,
            },
        });
        if self.pending.len() >= self.chunk_samples {
            self.flush()?;
        }
        Ok(())
    }
}
