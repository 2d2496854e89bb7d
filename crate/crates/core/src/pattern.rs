//! Ordered vector representation: the winner trajectory of a sequence on the
//! first map, collapsed to its key activations and resampled to a fixed
//! number of points.

use crate::error::{validation, Result};
use crate::som::Lattice;

/// Lattice coordinates `(row, col)` of successive winners.
#[derive(Debug, Clone, PartialEq)]
pub struct ActivationTrace {
    pub points: Vec<[f64; 2]>,
}

impl ActivationTrace {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Polyline length in lattice units.
    pub fn arc_length(&self) -> f64 {
        self.points.windows(2).map(|w| seg_len(w[0], w[1])).sum()
    }
}

/// Winner coordinates of each input row, in order.
pub fn trace(map: &Lattice, inputs: &[Vec<f64>]) -> Result<ActivationTrace> {
    let points = inputs
        .iter()
        .map(|x| {
            let (r, c) = map.coords(map.best_match(x)?);
            Ok([r as f64, c as f64])
        })
        .collect::<Result<_>>()?;
    Ok(ActivationTrace { points })
}

/// Collapses runs of identical consecutive points.
pub fn compress(trace: &ActivationTrace) -> ActivationTrace {
    let mut points: Vec<[f64; 2]> = Vec::with_capacity(trace.len());
    for &p in &trace.points {
        if points.last() != Some(&p) {
            points.push(p);
        }
    }
    ActivationTrace { points }
}

/// `k` points at equal arc-length spacing along the trace, without
/// normalization. A trace of zero length yields its first point `k` times.
pub fn resample_points(trace: &ActivationTrace, k: usize) -> Result<Vec<[f64; 2]>> {
    if trace.is_empty() {
        return validation("cannot resample an empty trace");
    }
    if k < 2 {
        return validation("need at least two resampled points");
    }
    let pts = &trace.points;
    let mut cumulative = Vec::with_capacity(pts.len());
    let mut acc = 0.0;
    cumulative.push(0.0);
    for w in pts.windows(2) {
        acc += seg_len(w[0], w[1]);
        cumulative.push(acc);
    }
    let total = acc;
    if total == 0.0 {
        return Ok(vec![pts[0]; k]);
    }
    let mut out = Vec::with_capacity(k);
    let mut seg = 0;
    for i in 0..k {
        if i == k - 1 {
            out.push(pts[pts.len() - 1]);
            break;
        }
        let target = total * i as f64 / (k - 1) as f64;
        while seg + 1 < pts.len() - 1 && cumulative[seg + 1] < target {
            seg += 1;
        }
        let (s0, s1) = (cumulative[seg], cumulative[seg + 1]);
        let u = if s1 > s0 { ((target - s0) / (s1 - s0)).clamp(0.0, 1.0) } else { 0.0 };
        let (a, b) = (pts[seg], pts[seg + 1]);
        out.push([a[0] + u * (b[0] - a[0]), a[1] + u * (b[1] - a[1])]);
    }
    Ok(out)
}

/// Resamples the trace to `k` points and normalizes them by the lattice
/// extent into `[0, 1]`, flattened as `(r1, c1, ..., rk, ck)`.
pub fn resample(trace: &ActivationTrace, k: usize, rows: usize, cols: usize) -> Result<Vec<f64>> {
    let span = |n: usize| if n > 1 { (n - 1) as f64 } else { 1.0 };
    let (sr, sc) = (span(rows), span(cols));
    Ok(resample_points(trace, k)?
        .into_iter()
        .flat_map(|[r, c]| [r / sr, c / sc])
        .collect())
}

/// `resample(compress(trace(map, inputs)), k)`.
pub fn pattern_vector(map: &Lattice, inputs: &[Vec<f64>], k: usize) -> Result<Vec<f64>> {
    let t = compress(&trace(map, inputs)?);
    resample(&t, k, map.rows(), map.cols())
}

fn seg_len(a: [f64; 2], b: [f64; 2]) -> f64 {
    let dr = b[0] - a[0];
    let dc = b[1] - a[1];
    (dr * dr + dc * dc).sqrt()
}
