//! Dataset ingestion: MSR-Action3D style skeleton text files, JSON-lines
//! frame streams, directory loading and stratified train/test splitting.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{validation, Error, Result};
use crate::skeleton::{ActionSequence, LabeledDataset, PostureFrame, SkeletonTopology};

/// Row layout of an MSR skeleton text file.
///
/// Each frame spans `rows_per_frame` rows; the real-world coordinate row of
/// joint `k` is row `offset + k * stride` within the frame. The plain layout
/// has one `x y z confidence` row per joint; the 40-row variant interleaves
/// real-world and screen rows for each joint.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct FrameLayout {
    pub joints: usize,
    pub rows_per_frame: usize,
    pub stride: usize,
    pub offset: usize,
}

impl Default for FrameLayout {
    fn default() -> Self {
        Self::msr20()
    }
}

impl FrameLayout {
    pub fn msr20() -> Self {
        Self {
            joints: 20,
            rows_per_frame: 20,
            stride: 1,
            offset: 0,
        }
    }

    pub fn msr40() -> Self {
        Self {
            joints: 20,
            rows_per_frame: 40,
            stride: 2,
            offset: 0,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.joints == 0 || self.stride == 0 {
            return validation("frame layout needs at least one joint and a positive stride");
        }
        if self.offset + (self.joints - 1) * self.stride >= self.rows_per_frame {
            return validation("frame layout rows do not fit in rows_per_frame");
        }
        Ok(())
    }
}

/// Parses an MSR skeleton text file.
///
/// A leading line with exactly two tokens (the `frames rows` header some
/// distributions carry) is skipped. Only the first three columns of the
/// selected rows are kept; the confidence column is discarded.
pub fn parse_msr_skeleton(
    text: &str,
    topology: &SkeletonTopology,
    layout: &FrameLayout,
    source_id: &str,
) -> Result<ActionSequence> {
    layout.validate()?;
    if layout.joints != topology.joint_count() {
        return validation(format!(
            "layout has {} joints, topology has {}",
            layout.joints,
            topology.joint_count()
        ));
    }
    let mut rows: Vec<[f64; 3]> = Vec::new();
    let mut first = true;
    for (idx, line) in text.lines().enumerate() {
        let line_no = idx + 1;
        let tokens: Vec<&str> = line.split_whitespace().collect();
        if tokens.is_empty() {
            continue;
        }
        if first && tokens.len() == 2 {
            first = false;
            continue;
        }
        first = false;
        if tokens.len() < 3 {
            return Err(Error::Parse {
                line: line_no,
                msg: format!("expected at least 3 columns, found {}", tokens.len()),
            });
        }
        let mut values = [0.0; 3];
        for (c, tok) in tokens.iter().enumerate() {
            let v: f64 = tok.parse().map_err(|_| Error::Parse {
                line: line_no,
                msg: format!("non-numeric token {tok:?}"),
            })?;
            if c < 3 {
                if !v.is_finite() {
                    return Err(Error::Parse {
                        line: line_no,
                        msg: "non-finite coordinate".into(),
                    });
                }
                values[c] = v;
            }
        }
        rows.push(values);
    }
    if rows.is_empty() {
        return Err(Error::MalformedFile(format!("{source_id}: no skeleton rows")));
    }
    if rows.len() % layout.rows_per_frame != 0 {
        return Err(Error::MalformedFile(format!(
            "{source_id}: {} rows is not a multiple of {} rows per frame",
            rows.len(),
            layout.rows_per_frame
        )));
    }
    let frames = rows
        .chunks_exact(layout.rows_per_frame)
        .map(|chunk| {
            PostureFrame::new(
                (0..layout.joints)
                    .map(|k| chunk[layout.offset + k * layout.stride])
                    .collect(),
            )
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(ActionSequence::new(frames, label_from_name(source_id), source_id))
}

/// Writes a sequence in MSR text layout with confidence 1. Rows of the
/// layout that carry no real-world coordinates are written as zeros.
pub fn write_msr_skeleton(seq: &ActionSequence, layout: &FrameLayout) -> Result<String> {
    layout.validate()?;
    let mut out = String::new();
    for frame in &seq.frames {
        if frame.joint_count() != layout.joints {
            return validation("frame joint count does not match layout");
        }
        for row in 0..layout.rows_per_frame {
            let real = row >= layout.offset
                && (row - layout.offset) % layout.stride == 0
                && (row - layout.offset) / layout.stride < layout.joints;
            if real {
                let [x, y, z] = frame.joints[(row - layout.offset) / layout.stride];
                writeln!(out, "{x:?} {y:?} {z:?} 1").expect("string write");
            } else {
                out.push_str("0 0 0 0\n");
            }
        }
    }
    Ok(out)
}

/// Label convention for dataset files: the file-name prefix before the first
/// underscore, e.g. `a03` for `a03_s07_e02_skeleton.txt`.
pub fn label_from_name(source_id: &str) -> Option<String> {
    let name = Path::new(source_id).file_name()?.to_str()?;
    let stem = name.split('.').next()?;
    let label = stem.split('_').next()?;
    (!label.is_empty()).then(|| label.to_string())
}

/// One record of the JSON-lines frame stream.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StreamRecord {
    pub i: u64,
    pub t: f64,
    pub j: Vec<f64>,
}

impl StreamRecord {
    pub fn from_frame(index: u64, time: f64, frame: &PostureFrame) -> Self {
        Self {
            i: index,
            t: time,
            j: frame.flat(),
        }
    }

    pub fn to_line(&self) -> String {
        serde_json::to_string(self).expect("stream record serializes")
    }
}

/// Incremental parser for the JSON-lines frame stream; enforces arity and
/// strictly increasing frame indices.
#[derive(Debug, Clone)]
pub struct JsonlReader {
    joints: usize,
    last_index: Option<u64>,
    line_no: usize,
}

impl JsonlReader {
    pub fn new(joints: usize) -> Self {
        Self {
            joints,
            last_index: None,
            line_no: 0,
        }
    }

    /// Parses one line. Blank lines yield `None`.
    pub fn parse_line(&mut self, line: &str) -> Result<Option<(StreamRecord, PostureFrame)>> {
        self.line_no += 1;
        if line.trim().is_empty() {
            return Ok(None);
        }
        let rec: StreamRecord = serde_json::from_str(line).map_err(|e| Error::Parse {
            line: self.line_no,
            msg: e.to_string(),
        })?;
        if rec.j.len() != 3 * self.joints {
            return Err(Error::Parse {
                line: self.line_no,
                msg: format!("expected {} joint values, found {}", 3 * self.joints, rec.j.len()),
            });
        }
        if let Some(last) = self.last_index {
            if rec.i <= last {
                return Err(Error::Stream(format!(
                    "line {}: frame index {} does not follow {}",
                    self.line_no, rec.i, last
                )));
            }
        }
        let frame = PostureFrame::from_flat(&rec.j).map_err(|e| Error::Parse {
            line: self.line_no,
            msg: e.to_string(),
        })?;
        self.last_index = Some(rec.i);
        Ok(Some((rec, frame)))
    }
}

/// Parses a whole JSON-lines document into a sequence.
pub fn parse_jsonl_sequence(text: &str, topology: &SkeletonTopology, source_id: &str) -> Result<ActionSequence> {
    let mut reader = JsonlReader::new(topology.joint_count());
    let mut frames = Vec::new();
    for line in text.lines() {
        if let Some((_, frame)) = reader.parse_line(line)? {
            frames.push(frame);
        }
    }
    if frames.is_empty() {
        return Err(Error::MalformedFile(format!("{source_id}: no frames")));
    }
    Ok(ActionSequence::new(frames, label_from_name(source_id), source_id))
}

/// Serializes frames as JSON lines at a nominal 30 frames per second.
pub fn write_jsonl<'a>(frames: impl IntoIterator<Item = &'a PostureFrame>) -> String {
    let mut out = String::new();
    for (i, f) in frames.into_iter().enumerate() {
        out.push_str(&StreamRecord::from_frame(i as u64, i as f64 / 30.0, f).to_line());
        out.push('\n');
    }
    out
}

/// Loads every `*.txt` (MSR layout) and `*.jsonl` file in `dir`, in file-name
/// order. Labels come from file names (see [`label_from_name`]).
pub fn load_dataset_dir(dir: &Path, topology: &SkeletonTopology, layout: &FrameLayout) -> Result<LabeledDataset> {
    let mut paths: Vec<_> = fs::read_dir(dir)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.is_file())
        .filter(|p| matches!(p.extension().and_then(|e| e.to_str()), Some("txt" | "jsonl")))
        .collect();
    paths.sort();
    if paths.is_empty() {
        return Err(Error::MalformedFile(format!("{}: no .txt or .jsonl files", dir.display())));
    }
    let mut sequences = Vec::with_capacity(paths.len());
    for path in paths {
        let text = fs::read_to_string(&path)?;
        let name = path.file_name().and_then(|n| n.to_str()).unwrap_or_default().to_string();
        let seq = if path.extension().and_then(|e| e.to_str()) == Some("jsonl") {
            parse_jsonl_sequence(&text, topology, &name)?
        } else {
            parse_msr_skeleton(&text, topology, layout, &name)?
        };
        sequences.push(seq);
    }
    Ok(LabeledDataset::from_sequences(sequences))
}

/// Writes each sequence as `<source_id>` (MSR text layout) into `dir`.
pub fn write_dataset_dir(dir: &Path, ds: &LabeledDataset, layout: &FrameLayout) -> Result<()> {
    fs::create_dir_all(dir)?;
    for seq in &ds.sequences {
        fs::write(dir.join(&seq.source_id), write_msr_skeleton(seq, layout)?)?;
    }
    Ok(())
}

/// Stratified, seeded split: each label's sequences are shuffled and split
/// at `train_fraction` (rounded to nearest). A label with two or more items
/// always keeps at least one test item unless the fraction is exactly 1.
pub fn split_dataset(ds: &LabeledDataset, train_fraction: f64, seed: u64) -> Result<(LabeledDataset, LabeledDataset)> {
    if !(0.0..=1.0).contains(&train_fraction) {
        return validation(format!("train fraction {train_fraction} outside [0, 1]"));
    }
    let mut groups: Vec<Vec<usize>> = vec![Vec::new(); ds.label_set.len()];
    for (i, s) in ds.sequences.iter().enumerate() {
        let label = s
            .label
            .as_deref()
            .ok_or_else(|| Error::Validation(format!("sequence {} is unlabeled", s.source_id)))?;
        let li = ds
            .label_index(label)
            .ok_or_else(|| Error::Validation(format!("label {label} not in label set")))?;
        groups[li].push(i);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut in_train = vec![false; ds.len()];
    for group in &mut groups {
        let n = group.len();
        group.shuffle(&mut rng);
        let mut n_train = (train_fraction * n as f64).round() as usize;
        if train_fraction < 1.0 && n >= 2 {
            n_train = n_train.min(n - 1);
        }
        for &i in &group[..n_train.min(n)] {
            in_train[i] = true;
        }
    }
    let pick = |want: bool| LabeledDataset {
        sequences: ds
            .sequences
            .iter()
            .zip(&in_train)
            .filter(|(_, &t)| t == want)
            .map(|(s, _)| s.clone())
            .collect(),
        label_set: ds.label_set.clone(),
    };
    Ok((pick(true), pick(false)))
}
