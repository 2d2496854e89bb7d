//! Binary model container.
//!
//! Layout, all integers little-endian:
//!
//! ```text
//! magic      8 bytes  "SKMAPMDL"
//! version    u32
//! header     u64 length + UTF-8 JSON (preprocessing, labels, settings, metadata)
//! first map  lattice block
//! second map lattice block
//! output     u32 labels, u32 inputs, labels*inputs f64
//! ```
//!
//! A lattice block is `u32 rows, u32 cols, u32 dim` followed by the weights,
//! row-major, as f64.

use std::fs;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::classify::{MapKind, OutputInput, OutputLayer, PipelineConfig, PipelineModel, TrainingReport};
use crate::error::{Error, Result};
use crate::preprocess::PreprocessConfig;
use crate::skeleton::{LabeledDataset, SkeletonTopology};
use crate::som::Lattice;

pub const MAGIC: &[u8; 8] = b"SKMAPMDL";
pub const FORMAT_VERSION: u32 = 1;

/// Provenance recorded alongside a trained model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingMetadata {
    pub config: PipelineConfig,
    pub train_fraction: f64,
    pub split_seed: u64,
    pub dataset_hash: String,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Header {
    topology: serde_json::Value,
    preprocess: PreprocessConfig,
    first_kind: MapKind,
    key_points: usize,
    second_sigma: f64,
    output_input: OutputInput,
    confidence_gain: f64,
    label_set: Vec<String>,
    report: TrainingReport,
    metadata: Option<TrainingMetadata>,
}

pub fn encode_model(model: &PipelineModel, metadata: Option<&TrainingMetadata>) -> Result<Vec<u8>> {
    model.validate()?;
    let header = Header {
        topology: serde_json::from_str(&model.topology.to_json()).expect("topology json"),
        preprocess: model.preprocess.clone(),
        first_kind: model.first_kind,
        key_points: model.key_points,
        second_sigma: model.second_sigma,
        output_input: model.output_input,
        confidence_gain: model.confidence_gain,
        label_set: model.output.label_set.clone(),
        report: model.report.clone(),
        metadata: metadata.cloned(),
    };
    let json = serde_json::to_vec(&header).map_err(|e| Error::ModelFormat(e.to_string()))?;
    let mut out = Vec::with_capacity(64 + json.len() + 8 * (model.first_map.weights().len() + model.second_map.weights().len()));
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
    out.extend_from_slice(&(json.len() as u64).to_le_bytes());
    out.extend_from_slice(&json);
    write_lattice(&mut out, &model.first_map);
    write_lattice(&mut out, &model.second_map);
    out.extend_from_slice(&(model.output.label_set.len() as u32).to_le_bytes());
    out.extend_from_slice(&(model.output.inputs as u32).to_le_bytes());
    for w in &model.output.weights {
        out.extend_from_slice(&w.to_le_bytes());
    }
    Ok(out)
}

fn write_lattice(out: &mut Vec<u8>, l: &Lattice) {
    for v in [l.rows(), l.cols(), l.dim()] {
        out.extend_from_slice(&(v as u32).to_le_bytes());
    }
    for w in l.weights() {
        out.extend_from_slice(&w.to_le_bytes());
    }
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|&e| e <= self.bytes.len())
            .ok_or_else(|| Error::ModelFormat("unexpected end of model file".into()))?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }

    fn f64s(&mut self, n: usize) -> Result<Vec<f64>> {
        let bytes = self.take(n.checked_mul(8).ok_or_else(|| Error::ModelFormat("size overflow".into()))?)?;
        Ok(bytes
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
            .collect())
    }

    fn lattice(&mut self) -> Result<Lattice> {
        let rows = self.u32()? as usize;
        let cols = self.u32()? as usize;
        let dim = self.u32()? as usize;
        let n = rows
            .checked_mul(cols)
            .and_then(|v| v.checked_mul(dim))
            .ok_or_else(|| Error::ModelFormat("lattice size overflow".into()))?;
        let weights = self.f64s(n)?;
        Lattice::from_weights(rows, cols, dim, weights).map_err(|e| Error::ModelFormat(e.to_string()))
    }
}

pub fn decode_model(bytes: &[u8]) -> Result<(PipelineModel, Option<TrainingMetadata>)> {
    let mut r = Reader { bytes, pos: 0 };
    if r.take(MAGIC.len())? != MAGIC {
        return Err(Error::ModelFormat("not a skelmap model file".into()));
    }
    let version = r.u32()?;
    if version != FORMAT_VERSION {
        return Err(Error::ModelFormat(format!("unsupported model format version {version}")));
    }
    let len = r.u64()? as usize;
    let header: Header = serde_json::from_slice(r.take(len)?).map_err(|e| Error::ModelFormat(e.to_string()))?;
    let topology = SkeletonTopology::from_json(&header.topology.to_string())?;
    let first_map = r.lattice()?;
    let second_map = r.lattice()?;
    let labels = r.u32()? as usize;
    let inputs = r.u32()? as usize;
    let weights = r.f64s(labels * inputs)?;
    if r.pos != bytes.len() {
        return Err(Error::ModelFormat("trailing bytes after model".into()));
    }
    if labels != header.label_set.len() {
        return Err(Error::ModelFormat("output layer label count differs from label set".into()));
    }
    let model = PipelineModel {
        topology,
        preprocess: header.preprocess,
        first_kind: header.first_kind,
        first_map,
        key_points: header.key_points,
        second_map,
        second_sigma: header.second_sigma,
        output: OutputLayer {
            weights,
            inputs,
            label_set: header.label_set,
        },
        output_input: header.output_input,
        confidence_gain: header.confidence_gain,
        report: header.report,
    };
    model.validate().map_err(|e| Error::ModelFormat(e.to_string()))?;
    Ok((model, header.metadata))
}

/// Writes the model through a temporary file in the target directory and
/// renames it into place, so readers never see a partial file.
pub fn save_model(path: &Path, model: &PipelineModel, metadata: Option<&TrainingMetadata>) -> Result<()> {
    let bytes = encode_model(model, metadata)?;
    write_atomic(path, &bytes)
}

pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d.to_path_buf(),
        _ => std::env::current_dir()?,
    };
    let name = path.file_name().and_then(|n| n.to_str()).unwrap_or("model");
    let tmp = dir.join(format!(".{name}.tmp{}", std::process::id()));
    let result = (|| {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
        fs::rename(&tmp, path)
    })();
    if result.is_err() {
        let _ = fs::remove_file(&tmp);
    }
    Ok(result?)
}

pub fn load_model(path: &Path) -> Result<(PipelineModel, Option<TrainingMetadata>)> {
    decode_model(&fs::read(path)?)
}

/// FNV-1a over every frame coordinate and label, as a hex string.
pub fn dataset_hash(ds: &LabeledDataset) -> String {
    const OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
    const PRIME: u64 = 0x0000_0100_0000_01b3;
    let mut h = OFFSET;
    let mut feed = |bytes: &[u8]| {
        for &b in bytes {
            h ^= b as u64;
            h = h.wrapping_mul(PRIME);
        }
    };
    for seq in &ds.sequences {
        feed(seq.source_id.as_bytes());
        feed(seq.label.as_deref().unwrap_or("").as_bytes());
        for f in &seq.frames {
            for v in f.flat() {
                feed(&v.to_le_bytes());
            }
        }
    }
    format!("{h:016x}")
}
