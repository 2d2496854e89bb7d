//! Hierarchical self-organizing maps for recognizing human actions from 3D
//! skeleton sequences.
//!
//! The pipeline preprocesses posture frames into body-centered input
//! vectors, maps them onto a first feature map (a fixed Kohonen map or a
//! growing grid), turns each action's winner trajectory into a fixed-length
//! pattern vector, clusters those on a second map and labels the clusters
//! with a supervised linear layer. [`segment`] runs the same model over an
//! unsegmented frame stream.

pub mod classify;
pub mod config;
pub mod dataset;
pub mod error;
pub mod growgrid;
pub mod pattern;
pub mod persist;
pub mod preprocess;
pub mod segment;
pub mod skeleton;
pub mod som;
pub mod synth;
pub mod vec3;

pub use classify::{evaluate, train_pipeline, EvalReport, MapKind, PipelineConfig, PipelineModel, Prediction};
pub use error::{Error, Result};
pub use growgrid::{GgParams, GrowingGrid};
pub use segment::{RecognitionEvent, SegmentParams, StreamState};
pub use skeleton::{ActionSequence, LabeledDataset, PostureFrame, SkeletonTopology};
pub use som::{Lattice, Neighborhood, SomParams};
