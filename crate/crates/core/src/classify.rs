//! Second-layer map over pattern vectors, the supervised output layer, and
//! the end-to-end training / prediction / evaluation pipeline.

use log::info;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{validation, Error, Result};
use crate::growgrid::{GgParams, GrowingGrid};
use crate::pattern;
use crate::preprocess::{self, PreprocessConfig};
use crate::skeleton::{ActionSequence, LabeledDataset, SkeletonTopology};
use crate::som::{Lattice, SomParams};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MapKind {
    Som,
    Gg,
}

/// What the output layer sees of the second map.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum OutputInput {
    #[default]
    Activity,
    WinnerOneHot,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FirstMapConfig {
    pub kind: MapKind,
    /// Lattice size for the fixed SOM; ignored by the growing grid.
    pub rows: usize,
    pub cols: usize,
    pub som: SomParams,
    pub gg: GgParams,
}

impl Default for FirstMapConfig {
    fn default() -> Self {
        Self {
            kind: MapKind::Som,
            rows: 30,
            cols: 30,
            som: SomParams::default(),
            gg: GgParams::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SecondMapConfig {
    pub rows: usize,
    pub cols: usize,
    pub som: SomParams,
}

impl Default for SecondMapConfig {
    fn default() -> Self {
        Self {
            rows: 15,
            cols: 15,
            som: SomParams {
                epochs: 100,
                seed: 2,
                ..SomParams::default()
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputConfig {
    pub eta: f64,
    pub epochs: usize,
    pub input: OutputInput,
    /// Divide each update by `|a|^2` (normalized LMS); the plain rule
    /// diverges once `eta * |a|^2 > 2`.
    pub normalized: bool,
    /// Multiplier applied to output scores before the softmax.
    pub confidence_gain: f64,
    pub seed: u64,
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self {
            eta: 0.1,
            epochs: 100,
            input: OutputInput::Activity,
            normalized: true,
            confidence_gain: 10.0,
            seed: 3,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PipelineConfig {
    /// Attended joints, by topology name.
    pub attention: Vec<String>,
    pub dynamics_order: u8,
    pub first_map: FirstMapConfig,
    /// Key points per pattern vector.
    pub key_points: usize,
    pub second_map: SecondMapConfig,
    pub output: OutputConfig,
}

pub const DEFAULT_ATTENTION: [&str; 8] = [
    "LeftElbow",
    "LeftHand",
    "RightElbow",
    "RightHand",
    "LeftKnee",
    "LeftFoot",
    "RightKnee",
    "RightFoot",
];

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            attention: DEFAULT_ATTENTION.iter().map(|s| s.to_string()).collect(),
            dynamics_order: 0,
            first_map: FirstMapConfig::default(),
            key_points: 30,
            second_map: SecondMapConfig::default(),
            output: OutputConfig::default(),
        }
    }
}

impl PipelineConfig {
    /// Derives every stage seed from one master seed.
    pub fn with_seed(mut self, seed: u64) -> Self {
        let mix = |k: u64| seed.wrapping_mul(0x9e37_79b9_7f4a_7c15).wrapping_add(k);
        self.first_map.som.seed = mix(1);
        self.first_map.gg.seed = mix(1);
        self.second_map.som.seed = mix(2);
        self.output.seed = mix(3);
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.key_points < 2 {
            return validation("key_points must be at least 2");
        }
        if self.dynamics_order > 2 {
            return validation("dynamics_order must be 0, 1 or 2");
        }
        if self.first_map.kind == MapKind::Som && (self.first_map.rows == 0 || self.first_map.cols == 0) {
            return validation("first map needs positive rows and cols");
        }
        if self.second_map.rows == 0 || self.second_map.cols == 0 {
            return validation("second map needs positive rows and cols");
        }
        if !(self.output.eta >= 0.0 && self.output.eta.is_finite()) {
            return validation("eta must be a non-negative number");
        }
        if self.output.normalized && self.output.eta >= 2.0 {
            return validation("normalized delta rule needs eta < 2");
        }
        if !(self.output.confidence_gain > 0.0) {
            return validation("confidence_gain must be positive");
        }
        self.first_map.som.validate()?;
        self.first_map.gg.validate()?;
        self.second_map.som.validate()
    }
}

/// Linear supervised layer: `scores = W a`.
#[derive(Debug, Clone, PartialEq)]
pub struct OutputLayer {
    /// Row-major `labels x inputs`.
    pub weights: Vec<f64>,
    pub inputs: usize,
    pub label_set: Vec<String>,
}

impl OutputLayer {
    pub fn zeros(label_set: Vec<String>, inputs: usize) -> Self {
        Self {
            weights: vec![0.0; label_set.len() * inputs],
            inputs,
            label_set,
        }
    }

    pub fn scores(&self, a: &[f64]) -> Vec<f64> {
        self.weights
            .chunks_exact(self.inputs)
            .map(|row| row.iter().zip(a).map(|(w, x)| w * x).sum())
            .collect()
    }
}

/// Delta-rule training: `W += eta (target - W a) a^T` per sample, samples
/// shuffled every epoch. With `normalized` the step is divided by `|a|^2`.
pub fn train_output(
    acts: &[Vec<f64>],
    labels: &[usize],
    label_set: Vec<String>,
    eta: f64,
    epochs: usize,
    normalized: bool,
    seed: u64,
) -> Result<OutputLayer> {
    if acts.is_empty() || acts.len() != labels.len() {
        return validation("need one label per activity vector");
    }
    let m = acts[0].len();
    if acts.iter().any(|a| a.len() != m) {
        return validation("activity vectors differ in length");
    }
    if let Some(&bad) = labels.iter().find(|&&l| l >= label_set.len()) {
        return validation(format!("label index {bad} outside label set"));
    }
    let mut layer = OutputLayer::zeros(label_set, m);
    let n_labels = layer.label_set.len();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut order: Vec<usize> = (0..acts.len()).collect();
    for _ in 0..epochs {
        order.shuffle(&mut rng);
        for &i in &order {
            let a = &acts[i];
            let rate = if normalized {
                let norm: f64 = a.iter().map(|v| v * v).sum();
                if norm == 0.0 {
                    continue;
                }
                eta / norm
            } else {
                eta
            };
            let y = layer.scores(a);
            for l in 0..n_labels {
                let target = if l == labels[i] { 1.0 } else { 0.0 };
                let err = rate * (target - y[l]);
                if err == 0.0 {
                    continue;
                }
                for (w, x) in layer.weights[l * m..(l + 1) * m].iter_mut().zip(a) {
                    *w += err * x;
                }
            }
        }
    }
    if layer.weights.iter().any(|w| !w.is_finite()) {
        return Err(Error::Validation("output layer diverged; lower eta".into()));
    }
    Ok(layer)
}

/// Activity of every second-map neuron for a pattern vector.
pub fn second_activity(map: &Lattice, pattern: &[f64], sigma: f64) -> Result<Vec<f64>> {
    Ok(map.activity(pattern, sigma)?.values)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingReport {
    pub train_sequences: usize,
    pub train_frames: usize,
    pub train_accuracy: f64,
    pub first_map_rows: usize,
    pub first_map_cols: usize,
    pub first_map_qe: f64,
    pub second_map_qe: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineModel {
    pub topology: SkeletonTopology,
    pub preprocess: PreprocessConfig,
    pub first_kind: MapKind,
    pub first_map: Lattice,
    pub key_points: usize,
    pub second_map: Lattice,
    pub second_sigma: f64,
    pub output: OutputLayer,
    pub output_input: OutputInput,
    pub confidence_gain: f64,
    pub report: TrainingReport,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub label: String,
    pub confidence: f64,
    pub scores: Vec<f64>,
}

impl PipelineModel {
    /// Re-checks every cross-stage arity constraint.
    pub fn validate(&self) -> Result<()> {
        self.preprocess.validate(&self.topology)?;
        if self.first_map.dim() != self.preprocess.input_dim() {
            return validation("first map dim differs from preprocessed input width");
        }
        if self.key_points < 2 || self.second_map.dim() != 2 * self.key_points {
            return validation("second map dim must be twice the key point count");
        }
        if self.output.inputs != self.second_map.len() {
            return validation("output layer width differs from second map size");
        }
        if self.output.label_set.is_empty() || self.output.weights.len() != self.output.label_set.len() * self.output.inputs {
            return validation("output layer shape is inconsistent");
        }
        if self.output.weights.iter().any(|w| !w.is_finite()) {
            return validation("output weights must be finite");
        }
        if !(self.second_sigma > 0.0 && self.confidence_gain > 0.0) {
            return validation("second map sigma and confidence gain must be positive");
        }
        Ok(())
    }

    pub fn input_vectors(&self, seq: &ActionSequence) -> Result<Vec<Vec<f64>>> {
        preprocess::preprocess_sequence(seq, &self.preprocess, &self.topology)
    }

    pub fn pattern_of(&self, seq: &ActionSequence) -> Result<Vec<f64>> {
        pattern::pattern_vector(&self.first_map, &self.input_vectors(seq)?, self.key_points)
    }

    /// Output-layer input for a pattern vector.
    pub fn output_features(&self, pattern: &[f64]) -> Result<Vec<f64>> {
        match self.output_input {
            OutputInput::Activity => second_activity(&self.second_map, pattern, self.second_sigma),
            OutputInput::WinnerOneHot => {
                let w = self.second_map.best_match(pattern)?;
                let mut a = vec![0.0; self.second_map.len()];
                a[w] = 1.0;
                Ok(a)
            }
        }
    }

    pub fn classify_pattern(&self, pattern: &[f64]) -> Result<Prediction> {
        let scores = self.output.scores(&self.output_features(pattern)?);
        let probs = softmax(&scores, self.confidence_gain);
        let mut best = 0;
        for (i, &p) in probs.iter().enumerate() {
            if p > probs[best] {
                best = i;
            }
        }
        Ok(Prediction {
            label: self.output.label_set[best].clone(),
            confidence: probs[best],
            scores,
        })
    }

    pub fn predict(&self, seq: &ActionSequence) -> Result<Prediction> {
        self.classify_pattern(&self.pattern_of(seq)?)
    }
}

fn softmax(scores: &[f64], gain: f64) -> Vec<f64> {
    let max = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = scores.iter().map(|s| ((s - max) * gain).exp()).collect();
    let total: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / total).collect()
}

/// Trains all stages in order on `train` only.
pub fn train_pipeline(train: &LabeledDataset, topology: &SkeletonTopology, config: &PipelineConfig) -> Result<PipelineModel> {
    config.validate()?;
    if train.label_set.len() < 2 {
        return validation("training needs at least two labels");
    }
    let labels: Vec<usize> = train
        .sequences
        .iter()
        .map(|s| {
            s.label
                .as_deref()
                .and_then(|l| train.label_index(l))
                .ok_or_else(|| Error::Validation(format!("sequence {} lacks a known label", s.source_id)))
        })
        .collect::<Result<_>>()?;
    if let Some(s) = train.sequences.iter().find(|s| s.len() < 2) {
        return validation(format!("sequence {} has fewer than 2 frames", s.source_id));
    }

    let attention = topology.resolve(&config.attention)?;
    let prep = PreprocessConfig::fit(train, topology, attention, config.dynamics_order)?;
    let per_seq: Vec<Vec<Vec<f64>>> = train
        .sequences
        .iter()
        .map(|s| preprocess::preprocess_sequence(s, &prep, topology))
        .collect::<Result<_>>()?;
    let frames: Vec<Vec<f64>> = per_seq.iter().flatten().cloned().collect();
    let dim = prep.input_dim();

    let fm = &config.first_map;
    let first_map = match fm.kind {
        MapKind::Som => {
            let mut l = Lattice::random(fm.rows, fm.cols, dim, fm.som.seed)?;
            l.train(&frames, &fm.som)?;
            l
        }
        MapKind::Gg => GrowingGrid::train(dim, &frames, &fm.gg)?.into_lattice(),
    };
    let first_map_qe = first_map.quantization_error(&frames)?;
    info!(
        "first map {}x{} trained on {} frames, qe {first_map_qe:.4}",
        first_map.rows(),
        first_map.cols(),
        frames.len()
    );

    let patterns: Vec<Vec<f64>> = per_seq
        .iter()
        .map(|x| pattern::pattern_vector(&first_map, x, config.key_points))
        .collect::<Result<_>>()?;
    let sm = &config.second_map;
    let mut second_map = Lattice::random(sm.rows, sm.cols, 2 * config.key_points, sm.som.seed)?;
    second_map.train(&patterns, &sm.som)?;
    let second_map_qe = second_map.quantization_error(&patterns)?;

    let mut model = PipelineModel {
        topology: topology.clone(),
        preprocess: prep,
        first_kind: fm.kind,
        first_map,
        key_points: config.key_points,
        second_map,
        second_sigma: sm.som.sigma,
        output: OutputLayer::zeros(train.label_set.clone(), sm.rows * sm.cols),
        output_input: config.output.input,
        confidence_gain: config.output.confidence_gain,
        report: TrainingReport {
            train_sequences: train.len(),
            train_frames: frames.len(),
            train_accuracy: 0.0,
            first_map_rows: 0,
            first_map_cols: 0,
            first_map_qe,
            second_map_qe,
        },
    };
    let acts: Vec<Vec<f64>> = patterns.iter().map(|p| model.output_features(p)).collect::<Result<_>>()?;
    model.output = train_output(
        &acts,
        &labels,
        train.label_set.clone(),
        config.output.eta,
        config.output.epochs,
        config.output.normalized,
        config.output.seed,
    )?;
    let mut correct = 0;
    for (p, &l) in patterns.iter().zip(&labels) {
        if model.classify_pattern(p)?.label == train.label_set[l] {
            correct += 1;
        }
    }
    model.report.train_accuracy = correct as f64 / labels.len() as f64;
    model.report.first_map_rows = model.first_map.rows();
    model.report.first_map_cols = model.first_map.cols();
    info!("training accuracy {:.3}", model.report.train_accuracy);
    Ok(model)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassRecall {
    pub label: String,
    pub support: usize,
    pub recall: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub accuracy: f64,
    pub correct: usize,
    pub total: usize,
    pub labels: Vec<String>,
    /// Counts, rows are true labels and columns predicted labels.
    pub confusion: Vec<Vec<usize>>,
    /// Each row divided by its support.
    pub confusion_normalized: Vec<Vec<f64>>,
    pub per_class: Vec<ClassRecall>,
}

impl EvalReport {
    /// Tallies `(true, predicted)` label-index pairs.
    pub fn from_pairs(labels: Vec<String>, pairs: &[(usize, usize)]) -> Result<Self> {
        if pairs.is_empty() {
            return validation("cannot evaluate an empty test set");
        }
        let l = labels.len();
        let mut confusion = vec![vec![0usize; l]; l];
        for &(t, p) in pairs {
            confusion[t][p] += 1;
        }
        let correct = (0..l).map(|i| confusion[i][i]).sum::<usize>();
        let confusion_normalized = confusion
            .iter()
            .map(|row| {
                let n: usize = row.iter().sum();
                row.iter().map(|&c| if n == 0 { 0.0 } else { c as f64 / n as f64 }).collect()
            })
            .collect();
        let per_class = labels
            .iter()
            .enumerate()
            .map(|(i, label)| {
                let support: usize = confusion[i].iter().sum();
                ClassRecall {
                    label: label.clone(),
                    support,
                    recall: (support > 0).then(|| confusion[i][i] as f64 / support as f64),
                }
            })
            .collect();
        Ok(Self {
            accuracy: correct as f64 / pairs.len() as f64,
            correct,
            total: pairs.len(),
            labels,
            confusion,
            confusion_normalized,
            per_class,
        })
    }
}

/// Classifies every test sequence with the frozen model.
pub fn evaluate(model: &PipelineModel, test: &LabeledDataset) -> Result<EvalReport> {
    if test.is_empty() {
        return validation("cannot evaluate an empty test set");
    }
    let labels = &model.output.label_set;
    let mut pairs = Vec::with_capacity(test.len());
    for seq in &test.sequences {
        let truth = seq
            .label
            .as_deref()
            .and_then(|l| labels.iter().position(|m| m == l))
            .ok_or_else(|| Error::Validation(format!("test sequence {} has an unknown label", seq.source_id)))?;
        let pred = model.predict(seq)?;
        let p = labels.iter().position(|m| *m == pred.label).expect("predicted label is in label set");
        pairs.push((truth, p));
    }
    EvalReport::from_pairs(labels.clone(), &pairs)
}
