//! Input normalization for the first map: link rescaling to standard lengths,
//! ego-centered coordinates built from the Stomach and hip joints, attention
//! filtering and orders of dynamics.

use log::debug;
use serde::{Deserialize, Serialize};

use crate::error::{validation, Error, Result};
use crate::skeleton::{ActionSequence, LabeledDataset, PostureFrame, SkeletonTopology};
use crate::vec3::{self, Vec3};

const GEOMETRY_EPS: f64 = 1e-6;

/// Fitted preprocessing parameters; persisted inside the model file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PreprocessConfig {
    pub attention_joints: Vec<usize>,
    /// One entry per topology link, in the topology's link order.
    pub standard_link_lengths: Vec<f64>,
    pub dynamics_order: u8,
    /// Position, velocity and acceleration block multipliers (`1 + dynamics_order` entries).
    pub block_scales: Vec<f64>,
}

impl PreprocessConfig {
    pub fn validate(&self, topology: &SkeletonTopology) -> Result<()> {
        if self.attention_joints.is_empty() {
            return validation("attention joint list is empty");
        }
        let mut sorted = self.attention_joints.clone();
        sorted.sort_unstable();
        sorted.dedup();
        if sorted.len() != self.attention_joints.len() {
            return validation("attention joint list has duplicates");
        }
        if sorted.last().is_some_and(|&j| j >= topology.joint_count()) {
            return validation("attention joint index out of range");
        }
        if self.dynamics_order > 2 {
            return validation("dynamics order must be 0, 1 or 2");
        }
        if self.standard_link_lengths.len() != topology.links().len() {
            return validation("standard link lengths do not match topology links");
        }
        if self.standard_link_lengths.iter().any(|&l| !(l > 0.0 && l.is_finite())) {
            return validation("standard link lengths must be positive");
        }
        if self.block_scales.len() != 1 + self.dynamics_order as usize
            || self.block_scales.iter().any(|s| !s.is_finite())
        {
            return validation("block scales must have one finite entry per dynamics block");
        }
        Ok(())
    }

    /// Width of one preprocessed input vector.
    pub fn input_dim(&self) -> usize {
        3 * self.attention_joints.len() * (1 + self.dynamics_order as usize)
    }

    /// Fits standard lengths and block scales on training data only.
    pub fn fit(
        train: &LabeledDataset,
        topology: &SkeletonTopology,
        attention_joints: Vec<usize>,
        dynamics_order: u8,
    ) -> Result<Self> {
        let mut cfg = Self {
            attention_joints,
            standard_link_lengths: compute_standard_lengths(train, topology)?,
            dynamics_order,
            block_scales: vec![1.0; 1 + dynamics_order as usize],
        };
        cfg.validate(topology)?;
        cfg.block_scales = fit_block_scales(train, &cfg, topology)?;
        Ok(cfg)
    }
}

/// Body-attached frame: `axes` rows are the X, Y, Z unit vectors.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EgoBasis {
    pub origin: Vec3,
    pub axes: [Vec3; 3],
}

/// Builds the ego-centered basis.
///
/// `P_S` is the projection of the Stomach onto the hip line. Z points from
/// `P_S` to the Stomach, Y from `P_S` to the left hip and X is `Y x Z`. The
/// origin sits at the Stomach.
pub fn ego_basis(frame: &PostureFrame, topology: &SkeletonTopology) -> Result<EgoBasis> {
    frame.check_arity(topology)?;
    let stomach = frame.joints[topology.stomach()];
    let left = frame.joints[topology.left_hip()];
    let right = frame.joints[topology.right_hip()];
    let hip_axis = vec3::sub(left, right);
    let hip_len = vec3::norm(hip_axis);
    if hip_len < GEOMETRY_EPS {
        return Err(Error::DegenerateSkeleton("hip joints coincide".into()));
    }
    let u = vec3::scale(hip_axis, 1.0 / hip_len);
    let along = vec3::dot(vec3::sub(stomach, right), u);
    let projection = vec3::add(right, vec3::scale(u, along));
    let z = vec3::normalize(vec3::sub(stomach, projection), GEOMETRY_EPS)
        .ok_or_else(|| Error::DegenerateSkeleton("stomach lies on the hip line".into()))?;
    // the left hip can coincide with P_S only if the hips coincide; the hip
    // direction itself is the robust choice for Y
    let y = vec3::normalize(vec3::sub(left, projection), GEOMETRY_EPS).unwrap_or(u);
    let x = vec3::normalize(vec3::cross(y, z), GEOMETRY_EPS)
        .ok_or_else(|| Error::DegenerateSkeleton("ego axes are collinear".into()))?;
    Ok(EgoBasis {
        origin: stomach,
        axes: [x, y, z],
    })
}

pub fn transform_frame(frame: &PostureFrame, basis: &EgoBasis) -> PostureFrame {
    PostureFrame {
        joints: frame
            .joints
            .iter()
            .map(|&p| vec3::mat_mul_vec(&basis.axes, vec3::sub(p, basis.origin)))
            .collect(),
    }
}

/// Mean length of every link over all frames of the training set.
pub fn compute_standard_lengths(train: &LabeledDataset, topology: &SkeletonTopology) -> Result<Vec<f64>> {
    let links = topology.links();
    let mut sums = vec![0.0; links.len()];
    let mut count = 0usize;
    for frame in train.sequences.iter().flat_map(|s| &s.frames) {
        frame.check_arity(topology)?;
        for (sum, &(p, c)) in sums.iter_mut().zip(links) {
            *sum += vec3::dist(frame.joints[p], frame.joints[c]);
        }
        count += 1;
    }
    if count == 0 {
        return validation("cannot compute standard lengths from an empty training set");
    }
    let means: Vec<f64> = sums.into_iter().map(|s| s / count as f64).collect();
    if let Some(k) = means.iter().position(|&m| m < GEOMETRY_EPS) {
        return Err(Error::DegenerateSkeleton(format!("link {k} has zero mean length")));
    }
    Ok(means)
}

/// Re-places every joint at its standard link length from its parent,
/// keeping the root position and each link's direction.
///
/// A zero-length link borrows its direction from `previous` (the previous
/// rescaled frame) or falls back to +Z.
pub fn rescale_links(
    frame: &PostureFrame,
    standard_lengths: &[f64],
    topology: &SkeletonTopology,
    previous: Option<&PostureFrame>,
) -> Result<PostureFrame> {
    frame.check_arity(topology)?;
    if standard_lengths.len() != topology.links().len() {
        return validation("standard lengths do not match topology links");
    }
    let mut out = frame.joints.clone();
    for (k, &(p, c)) in topology.links().iter().enumerate() {
        let observed = vec3::sub(frame.joints[c], frame.joints[p]);
        let dir = match vec3::normalize(observed, 1e-12) {
            Some(d) => d,
            None => {
                debug!("link {k} has zero length; reusing previous direction");
                previous
                    .and_then(|prev| vec3::normalize(vec3::sub(prev.joints[c], prev.joints[p]), 1e-12))
                    .unwrap_or([0.0, 0.0, 1.0])
            }
        };
        out[c] = vec3::add(out[p], vec3::scale(dir, standard_lengths[k]));
    }
    Ok(PostureFrame { joints: out })
}

/// Rescale, ego transform and attention filter for one frame: the position
/// block of the input vector (unscaled).
pub fn position_block(
    frame: &PostureFrame,
    config: &PreprocessConfig,
    topology: &SkeletonTopology,
    previous_rescaled: Option<&PostureFrame>,
) -> Result<(Vec<f64>, PostureFrame)> {
    let rescaled = rescale_links(frame, &config.standard_link_lengths, topology, previous_rescaled)?;
    let basis = ego_basis(&rescaled, topology)?;
    let ego = transform_frame(&rescaled, &basis);
    let block = config
        .attention_joints
        .iter()
        .flat_map(|&j| ego.joints[j])
        .collect();
    Ok((block, rescaled))
}

/// Appends forward-difference velocity and acceleration blocks.
///
/// `v_t = p_{t+1} - p_t` and `a_t = v_{t+1} - v_t`, with the last value of
/// each repeated so the output keeps one row per frame. Each block is
/// multiplied by its entry in `block_scales`.
pub fn dynamics(positions: &[Vec<f64>], order: u8, block_scales: &[f64]) -> Result<Vec<Vec<f64>>> {
    let t = positions.len();
    if order > 2 {
        return validation("dynamics order must be 0, 1 or 2");
    }
    if t < order as usize + 1 {
        return validation(format!("dynamics order {order} needs at least {} frames, got {t}", order + 1));
    }
    if block_scales.len() != 1 + order as usize {
        return validation("one block scale per dynamics block required");
    }
    Ok(dynamics_unchecked(positions, order, block_scales))
}

/// [`dynamics`] without the frame-count check; missing differences of a
/// one-frame input come out as zeros.
pub(crate) fn dynamics_unchecked(positions: &[Vec<f64>], order: u8, block_scales: &[f64]) -> Vec<Vec<f64>> {
    let t = positions.len();
    if t == 0 {
        return Vec::new();
    }
    let diff = |rows: &[Vec<f64>]| -> Vec<Vec<f64>> {
        let n = rows.len();
        let mut d: Vec<Vec<f64>> = (0..n - 1)
            .map(|i| rows[i + 1].iter().zip(&rows[i]).map(|(b, a)| b - a).collect())
            .collect();
        let last = d.last().cloned().unwrap_or_else(|| vec![0.0; rows[0].len()]);
        d.push(last);
        d
    };
    let mut blocks = vec![positions.to_vec()];
    if order >= 1 {
        blocks.push(diff(&blocks[0]));
    }
    if order >= 2 {
        blocks.push(diff(&blocks[1]));
    }
    (0..t)
        .map(|i| {
            blocks
                .iter()
                .zip(block_scales)
                .flat_map(|(b, &s)| b[i].iter().map(move |v| v * s))
                .collect()
        })
        .collect()
}

/// Position blocks for a whole sequence.
pub fn position_blocks(
    seq: &ActionSequence,
    config: &PreprocessConfig,
    topology: &SkeletonTopology,
) -> Result<Vec<Vec<f64>>> {
    let mut previous: Option<PostureFrame> = None;
    let mut out = Vec::with_capacity(seq.len());
    for frame in &seq.frames {
        let (block, rescaled) = position_block(frame, config, topology, previous.as_ref())?;
        out.push(block);
        previous = Some(rescaled);
    }
    Ok(out)
}

/// Full per-frame preprocessing: `T x D` input vectors with
/// `D = 3 * |attention| * (1 + dynamics_order)`.
pub fn preprocess_sequence(
    seq: &ActionSequence,
    config: &PreprocessConfig,
    topology: &SkeletonTopology,
) -> Result<Vec<Vec<f64>>> {
    let positions = position_blocks(seq, config, topology)?;
    dynamics(&positions, config.dynamics_order, &config.block_scales)
}

/// Block multipliers giving each block unit RMS over the training set.
fn fit_block_scales(train: &LabeledDataset, config: &PreprocessConfig, topology: &SkeletonTopology) -> Result<Vec<f64>> {
    let blocks = 1 + config.dynamics_order as usize;
    let width = 3 * config.attention_joints.len();
    let mut sq = vec![0.0; blocks];
    let mut n = 0usize;
    let unit = vec![1.0; blocks];
    for seq in &train.sequences {
        let positions = position_blocks(seq, config, topology)?;
        for row in dynamics(&positions, config.dynamics_order, &unit)? {
            for (b, acc) in sq.iter_mut().enumerate() {
                *acc += row[b * width..(b + 1) * width].iter().map(|v| v * v).sum::<f64>();
            }
            n += width;
        }
    }
    Ok(sq
        .into_iter()
        .map(|s| {
            let rms = (s / n.max(1) as f64).sqrt();
            if rms > 1e-12 {
                1.0 / rms
            } else {
                1.0
            }
        })
        .collect())
}
