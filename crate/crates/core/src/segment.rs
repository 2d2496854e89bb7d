//! Online recognition of unsegmented frame streams.
//!
//! Each frame is preprocessed with the model's fitted configuration and
//! mapped to its first-map winner. Winners that differ from the previous one
//! enter a sliding window of key activations; the window is resampled to a
//! pattern vector and classified every time it changes. A label is emitted
//! once it has been the confident classification of `consecutive` window
//! updates in a row. The same label is emitted again only after another
//! label, or after a full window of key activations in which it was not
//! confidently recognized.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use crate::classify::{PipelineModel, Prediction};
use crate::error::{validation, Result};
use crate::pattern::{self, ActivationTrace};
use crate::preprocess;
use crate::skeleton::PostureFrame;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SegmentParams {
    /// Window capacity in key activations.
    pub window: usize,
    /// Key activations required before the first classification.
    pub min_keys: usize,
    /// Confidence threshold.
    pub theta: f64,
    /// Agreeing window updates required for an event.
    pub consecutive: usize,
}

impl Default for SegmentParams {
    fn default() -> Self {
        Self {
            window: 30,
            min_keys: 5,
            theta: 0.5,
            consecutive: 3,
        }
    }
}

impl SegmentParams {
    pub fn validate(&self) -> Result<()> {
        if self.window < 2 || self.min_keys == 0 || self.min_keys > self.window {
            return validation("need window >= 2 and 1 <= min_keys <= window");
        }
        if !(0.0..=1.0).contains(&self.theta) {
            return validation("theta must lie in [0, 1]");
        }
        if self.consecutive == 0 {
            return validation("consecutive must be at least 1");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecognitionEvent {
    pub label: String,
    pub confidence: f64,
    /// Frame at which the agreeing run began.
    pub onset: u64,
    /// Frame at which the event was emitted.
    pub emit: u64,
}

#[derive(Debug, Clone, Default)]
struct Hysteresis {
    label: Option<String>,
    count: usize,
    onset: u64,
}

#[derive(Debug, Clone)]
pub struct StreamState<'m> {
    model: &'m PipelineModel,
    params: SegmentParams,
    keys: VecDeque<[f64; 2]>,
    /// Frames received so far.
    received: u64,
    /// Frames turned into input vectors so far.
    processed: u64,
    previous_rescaled: Option<PostureFrame>,
    /// Position blocks awaiting their forward differences.
    pending: VecDeque<Vec<f64>>,
    /// The last position blocks already processed, kept for end-of-stream differences.
    history: VecDeque<Vec<f64>>,
    hyst: Hysteresis,
    last_emitted: Option<String>,
    keys_since_emit: usize,
}

impl<'m> StreamState<'m> {
    pub fn new(model: &'m PipelineModel, params: SegmentParams) -> Result<Self> {
        params.validate()?;
        Ok(Self {
            model,
            params,
            keys: VecDeque::new(),
            received: 0,
            processed: 0,
            previous_rescaled: None,
            pending: VecDeque::new(),
            history: VecDeque::new(),
            hyst: Hysteresis::default(),
            last_emitted: None,
            keys_since_emit: 0,
        })
    }

    pub fn params(&self) -> &SegmentParams {
        &self.params
    }

    /// Current key-activation window, oldest first.
    pub fn key_buffer(&self) -> impl Iterator<Item = &[f64; 2]> {
        self.keys.iter()
    }

    pub fn key_count(&self) -> usize {
        self.keys.len()
    }

    pub fn frames_received(&self) -> u64 {
        self.received
    }

    /// Clears window, hysteresis and differencing state; keeps the model.
    pub fn reset(&mut self) {
        *self = Self {
            model: self.model,
            params: self.params.clone(),
            keys: VecDeque::new(),
            received: 0,
            processed: 0,
            previous_rescaled: None,
            pending: VecDeque::new(),
            history: VecDeque::new(),
            hyst: Hysteresis::default(),
            last_emitted: None,
            keys_since_emit: 0,
        };
    }

    /// Feeds one raw frame. With dynamics enabled a frame is processed once
    /// the frames its forward differences need have arrived, so events lag
    /// the input by `dynamics_order` frames.
    pub fn push_frame(&mut self, frame: &PostureFrame) -> Result<Option<RecognitionEvent>> {
        let model = self.model;
        frame.check_arity(&model.topology)?;
        let (block, rescaled) =
            preprocess::position_block(frame, &model.preprocess, &model.topology, self.previous_rescaled.as_ref())?;
        self.previous_rescaled = Some(rescaled);
        self.received += 1;
        self.pending.push_back(block);
        let order = model.preprocess.dynamics_order as usize;
        if self.pending.len() <= order {
            return Ok(None);
        }
        let window: Vec<Vec<f64>> = self.pending.iter().cloned().collect();
        let input = preprocess::dynamics_unchecked(&window, model.preprocess.dynamics_order, &model.preprocess.block_scales)
            .swap_remove(0);
        self.retire_pending();
        self.process_input(&input)
    }

    /// Processes the frames still waiting for differences at the end of a
    /// stream, repeating the last difference as batch preprocessing does.
    pub fn finish(&mut self) -> Result<Vec<RecognitionEvent>> {
        let model = self.model;
        if self.pending.is_empty() {
            return Ok(Vec::new());
        }
        let n_pending = self.pending.len();
        let suffix: Vec<Vec<f64>> = self.history.iter().chain(self.pending.iter()).cloned().collect();
        let rows = preprocess::dynamics_unchecked(&suffix, model.preprocess.dynamics_order, &model.preprocess.block_scales);
        let tail = rows[rows.len() - n_pending..].to_vec();
        let mut events = Vec::new();
        for input in tail {
            self.retire_pending();
            if let Some(e) = self.process_input(&input)? {
                events.push(e);
            }
        }
        Ok(events)
    }

    fn retire_pending(&mut self) {
        if let Some(p) = self.pending.pop_front() {
            self.history.push_back(p);
            while self.history.len() > self.model.preprocess.dynamics_order as usize {
                self.history.pop_front();
            }
        }
    }

    fn process_input(&mut self, input: &[f64]) -> Result<Option<RecognitionEvent>> {
        let frame_index = self.processed;
        self.processed += 1;
        let map = &self.model.first_map;
        let (r, c) = map.coords(map.best_match(input)?);
        let point = [r as f64, c as f64];
        if self.keys.back() == Some(&point) {
            return Ok(None);
        }
        self.keys.push_back(point);
        if self.keys.len() > self.params.window {
            self.keys.pop_front();
        }
        self.keys_since_emit += 1;
        if self.keys.len() < self.params.min_keys {
            return Ok(None);
        }
        let pred = self.classify_window()?;
        if pred.confidence >= self.params.theta && self.last_emitted.as_deref() == Some(pred.label.as_str()) {
            // the emitted action is still in view; turnover counts from here
            self.keys_since_emit = 0;
        }
        Ok(self.update_hysteresis(pred, frame_index))
    }

    /// Classification of the current window, if it holds any key activation.
    pub fn current_prediction(&self) -> Result<Option<Prediction>> {
        if self.keys.is_empty() {
            return Ok(None);
        }
        self.classify_window().map(Some)
    }

    fn classify_window(&self) -> Result<Prediction> {
        let trace = ActivationTrace {
            points: self.keys.iter().copied().collect(),
        };
        let map = &self.model.first_map;
        let pattern = pattern::resample(&trace, self.model.key_points, map.rows(), map.cols())?;
        self.model.classify_pattern(&pattern)
    }

    fn update_hysteresis(&mut self, pred: Prediction, frame_index: u64) -> Option<RecognitionEvent> {
        if pred.confidence < self.params.theta {
            self.hyst = Hysteresis::default();
            return None;
        }
        if self.hyst.label.as_deref() == Some(pred.label.as_str()) {
            self.hyst.count += 1;
        } else {
            self.hyst = Hysteresis {
                label: Some(pred.label.clone()),
                count: 1,
                onset: frame_index,
            };
        }
        if self.hyst.count < self.params.consecutive {
            return None;
        }
        let repeat = self.last_emitted.as_deref() == Some(pred.label.as_str());
        if repeat && self.keys_since_emit < self.params.window {
            return None;
        }
        let event = RecognitionEvent {
            label: pred.label,
            confidence: pred.confidence,
            onset: self.hyst.onset,
            emit: frame_index,
        };
        self.hyst = Hysteresis::default();
        self.last_emitted = Some(event.label.clone());
        self.keys_since_emit = 0;
        Some(event)
    }
}

/// Runs a whole frame sequence through a fresh stream state.
pub fn segment_stream<'a>(
    model: &PipelineModel,
    params: &SegmentParams,
    frames: impl IntoIterator<Item = &'a PostureFrame>,
) -> Result<Vec<RecognitionEvent>> {
    let mut state = StreamState::new(model, params.clone())?;
    let mut events = Vec::new();
    for f in frames {
        events.extend(state.push_frame(f)?);
    }
    events.extend(state.finish()?);
    Ok(events)
}
