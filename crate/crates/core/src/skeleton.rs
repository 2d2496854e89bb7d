//! Skeleton data model: joint topology, posture frames and labeled sequences.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use crate::error::{validation, Error, Result};
use crate::vec3::Vec3;

pub const STOMACH: &str = "Stomach";
pub const LEFT_HIP: &str = "LeftHip";
pub const RIGHT_HIP: &str = "RightHip";

const KINECT20: &str = include_str!("../data/kinect20.json");

#[derive(Debug, Serialize, Deserialize)]
struct TopologyFile {
    joints: Vec<JointEntry>,
}

#[derive(Debug, Serialize, Deserialize)]
struct JointEntry {
    name: String,
    parent: Option<String>,
}

/// Joint tree of a skeleton.
///
/// `links` lists every `(parent, child)` pair in breadth-first order from the
/// root, so link `k` can always be placed once its parent joint is known.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SkeletonTopology {
    joint_names: Vec<String>,
    parent: Vec<Option<usize>>,
    root: usize,
    links: Vec<(usize, usize)>,
    link_of_child: Vec<Option<usize>>,
    stomach: usize,
    left_hip: usize,
    right_hip: usize,
}

impl SkeletonTopology {
    pub fn new(joint_names: Vec<String>, parent: Vec<Option<usize>>) -> Result<Self> {
        let n = joint_names.len();
        if n == 0 || parent.len() != n {
            return validation("topology needs one parent entry per joint");
        }
        let roots: Vec<usize> = (0..n).filter(|&j| parent[j].is_none()).collect();
        if roots.len() != 1 {
            return validation(format!("topology must have exactly one root, found {}", roots.len()));
        }
        let root = roots[0];
        let mut children = vec![Vec::new(); n];
        for (j, p) in parent.iter().enumerate() {
            if let Some(p) = *p {
                if p >= n || p == j {
                    return validation(format!("joint {j} has invalid parent {p}"));
                }
                children[p].push(j);
            }
        }
        let mut links = Vec::with_capacity(n - 1);
        let mut link_of_child = vec![None; n];
        let mut seen = vec![false; n];
        let mut queue = VecDeque::from([root]);
        seen[root] = true;
        while let Some(p) = queue.pop_front() {
            for &c in &children[p] {
                if seen[c] {
                    return validation("joint parent graph has a cycle");
                }
                seen[c] = true;
                link_of_child[c] = Some(links.len());
                links.push((p, c));
                queue.push_back(c);
            }
        }
        if links.len() != n - 1 {
            return validation("joint parent graph is not a tree");
        }
        let find = |name: &str| -> Result<usize> {
            joint_names
                .iter()
                .position(|j| j == name)
                .ok_or_else(|| Error::Validation(format!("topology lacks required joint {name}")))
        };
        let stomach = find(STOMACH)?;
        let left_hip = find(LEFT_HIP)?;
        let right_hip = find(RIGHT_HIP)?;
        if stomach != root {
            return validation("the Stomach joint must be the topology root");
        }
        Ok(Self {
            joint_names,
            parent,
            root,
            links,
            link_of_child,
            stomach,
            left_hip,
            right_hip,
        })
    }

    /// Parses the `{"joints": [{"name", "parent"}]}` topology document.
    pub fn from_json(text: &str) -> Result<Self> {
        let file: TopologyFile =
            serde_json::from_str(text).map_err(|e| Error::Validation(format!("topology file: {e}")))?;
        let names: Vec<String> = file.joints.iter().map(|j| j.name.clone()).collect();
        let mut parent = Vec::with_capacity(names.len());
        for j in &file.joints {
            parent.push(match &j.parent {
                None => None,
                Some(p) => Some(
                    names
                        .iter()
                        .position(|n| n == p)
                        .ok_or_else(|| Error::Validation(format!("unknown parent joint {p}")))?,
                ),
            });
        }
        Self::new(names, parent)
    }

    pub fn to_json(&self) -> String {
        let file = TopologyFile {
            joints: self
                .joint_names
                .iter()
                .zip(&self.parent)
                .map(|(name, p)| JointEntry {
                    name: name.clone(),
                    parent: p.map(|p| self.joint_names[p].clone()),
                })
                .collect(),
        };
        serde_json::to_string(&file).expect("topology serializes")
    }

    /// The 20-joint Kinect v1 skeleton used by MSR-Action3D style recordings.
    pub fn kinect20() -> Self {
        Self::from_json(KINECT20).expect("bundled topology is valid")
    }

    pub fn joint_count(&self) -> usize {
        self.joint_names.len()
    }

    pub fn joint_names(&self) -> &[String] {
        &self.joint_names
    }

    pub fn joint_index(&self, name: &str) -> Option<usize> {
        self.joint_names.iter().position(|n| n == name)
    }

    pub fn parent(&self, joint: usize) -> Option<usize> {
        self.parent[joint]
    }

    pub fn root(&self) -> usize {
        self.root
    }

    pub fn links(&self) -> &[(usize, usize)] {
        &self.links
    }

    pub fn link_of_child(&self, joint: usize) -> Option<usize> {
        self.link_of_child[joint]
    }

    pub fn stomach(&self) -> usize {
        self.stomach
    }

    pub fn left_hip(&self) -> usize {
        self.left_hip
    }

    pub fn right_hip(&self) -> usize {
        self.right_hip
    }

    /// Resolves joint names to indices, rejecting unknown names.
    pub fn resolve(&self, names: &[impl AsRef<str>]) -> Result<Vec<usize>> {
        names
            .iter()
            .map(|n| {
                self.joint_index(n.as_ref())
                    .ok_or_else(|| Error::Validation(format!("unknown joint {}", n.as_ref())))
            })
            .collect()
    }
}

/// One time sample of joint positions in meters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PostureFrame {
    pub joints: Vec<Vec3>,
}

impl PostureFrame {
    pub fn new(joints: Vec<Vec3>) -> Result<Self> {
        if let Some(j) = joints.iter().position(|p| p.iter().any(|c| !c.is_finite())) {
            return validation(format!("joint {j} has a non-finite coordinate"));
        }
        Ok(Self { joints })
    }

    /// Builds a frame from `[x0, y0, z0, x1, ...]`.
    pub fn from_flat(values: &[f64]) -> Result<Self> {
        if values.len() % 3 != 0 {
            return validation("flat joint array length must be a multiple of 3");
        }
        Self::new(values.chunks_exact(3).map(|c| [c[0], c[1], c[2]]).collect())
    }

    pub fn flat(&self) -> Vec<f64> {
        self.joints.iter().flatten().copied().collect()
    }

    pub fn joint_count(&self) -> usize {
        self.joints.len()
    }

    pub fn check_arity(&self, topology: &SkeletonTopology) -> Result<()> {
        if self.joints.len() != topology.joint_count() {
            return validation(format!(
                "frame has {} joints, topology has {}",
                self.joints.len(),
                topology.joint_count()
            ));
        }
        Ok(())
    }

    /// Applies `p -> scale * R p + t` to every joint.
    pub fn similarity(&self, rotation: &[Vec3; 3], scale: f64, translation: Vec3) -> Self {
        use crate::vec3::{add, mat_mul_vec, scale as vscale};
        Self {
            joints: self
                .joints
                .iter()
                .map(|&p| add(vscale(mat_mul_vec(rotation, p), scale), translation))
                .collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ActionSequence {
    pub frames: Vec<PostureFrame>,
    pub label: Option<String>,
    pub source_id: String,
}

impl ActionSequence {
    pub fn new(frames: Vec<PostureFrame>, label: Option<String>, source_id: impl Into<String>) -> Self {
        Self {
            frames,
            label,
            source_id: source_id.into(),
        }
    }

    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    pub fn similarity(&self, rotation: &[Vec3; 3], scale: f64, translation: Vec3) -> Self {
        Self {
            frames: self
                .frames
                .iter()
                .map(|f| f.similarity(rotation, scale, translation))
                .collect(),
            label: self.label.clone(),
            source_id: self.source_id.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct LabeledDataset {
    pub sequences: Vec<ActionSequence>,
    pub label_set: Vec<String>,
}

impl LabeledDataset {
    /// Builds a dataset whose label set is the sorted distinct labels.
    pub fn from_sequences(sequences: Vec<ActionSequence>) -> Self {
        let mut label_set: Vec<String> = sequences.iter().filter_map(|s| s.label.clone()).collect();
        label_set.sort();
        label_set.dedup();
        Self { sequences, label_set }
    }

    pub fn with_label_set(sequences: Vec<ActionSequence>, label_set: Vec<String>) -> Result<Self> {
        for s in &sequences {
            if let Some(l) = &s.label {
                if !label_set.contains(l) {
                    return validation(format!("label {l} of {} not in label set", s.source_id));
                }
            }
        }
        Ok(Self { sequences, label_set })
    }

    pub fn len(&self) -> usize {
        self.sequences.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sequences.is_empty()
    }

    pub fn label_index(&self, label: &str) -> Option<usize> {
        self.label_set.iter().position(|l| l == label)
    }

    pub fn frame_count(&self) -> usize {
        self.sequences.iter().map(ActionSequence::len).sum()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn kinect_tree_shape() {
        let t = SkeletonTopology::kinect20();
        assert_eq!(t.joint_count(), 20);
        assert_eq!(t.links().len(), 19);
        assert_eq!(t.root(), t.stomach());
        assert_eq!(t.joint_names()[t.left_hip()], "LeftHip");
        // breadth-first: every link's parent is placed by an earlier link or is the root
        for (k, &(p, _)) in t.links().iter().enumerate() {
            if p != t.root() {
                assert!(t.link_of_child(p).unwrap() < k);
            }
        }
    }

    #[test]
    fn rejects_two_roots_and_cycles() {
        let names = vec!["Stomach".into(), "LeftHip".into(), "RightHip".into()];
        assert!(SkeletonTopology::new(names.clone(), vec![None, None, Some(0)]).is_err());
        assert!(SkeletonTopology::new(names.clone(), vec![None, Some(2), Some(1)]).is_err());
        assert!(SkeletonTopology::new(names, vec![None, Some(0), Some(0)]).is_ok());
    }

    #[test]
    fn rejects_missing_hip() {
        let names = vec!["Stomach".into(), "LeftHip".into(), "Knee".into()];
        assert!(matches!(
            SkeletonTopology::new(names, vec![None, Some(0), Some(1)]),
            Err(Error::Validation(_))
        ));
    }

    #[test]
    fn frame_rejects_non_finite() {
        assert!(PostureFrame::new(vec![[0.0, f64::NAN, 0.0]]).is_err());
        assert!(PostureFrame::from_flat(&[1.0, 2.0]).is_err());
    }
}
