//! Fixed-topology Kohonen feature map.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{validation, Result};

/// A rectangular lattice of weight vectors, stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Lattice {
    rows: usize,
    cols: usize,
    dim: usize,
    weights: Vec<f64>,
}

impl Lattice {
    /// Weights drawn i.i.d. from `U[0, 1)`.
    pub fn random(rows: usize, cols: usize, dim: usize, seed: u64) -> Result<Self> {
        if rows == 0 || cols == 0 || dim == 0 {
            return validation("lattice rows, cols and dim must be positive");
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let weights = (0..rows * cols * dim).map(|_| rng.random::<f64>()).collect();
        Ok(Self {
            rows,
            cols,
            dim,
            weights,
        })
    }

    pub fn from_weights(rows: usize, cols: usize, dim: usize, weights: Vec<f64>) -> Result<Self> {
        if rows == 0 || cols == 0 || dim == 0 {
            return validation("lattice rows, cols and dim must be positive");
        }
        if weights.len() != rows * cols * dim {
            return validation(format!(
                "expected {} weights for a {rows}x{cols}x{dim} lattice, got {}",
                rows * cols * dim,
                weights.len()
            ));
        }
        if weights.iter().any(|w| !w.is_finite()) {
            return validation("lattice weights must be finite");
        }
        Ok(Self {
            rows,
            cols,
            dim,
            weights,
        })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.rows * self.cols
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn weight(&self, neuron: usize) -> &[f64] {
        &self.weights[neuron * self.dim..(neuron + 1) * self.dim]
    }

    pub fn weight_mut(&mut self, neuron: usize) -> &mut [f64] {
        &mut self.weights[neuron * self.dim..(neuron + 1) * self.dim]
    }

    pub fn index(&self, row: usize, col: usize) -> usize {
        row * self.cols + col
    }

    pub fn coords(&self, neuron: usize) -> (usize, usize) {
        (neuron / self.cols, neuron % self.cols)
    }

    /// Direct (4-connected) lattice neighbors in row-major order.
    pub fn neighbors(&self, neuron: usize) -> impl Iterator<Item = usize> + '_ {
        let (r, c) = self.coords(neuron);
        let up = (r > 0).then(|| self.index(r - 1, c));
        let left = (c > 0).then(|| self.index(r, c - 1));
        let right = (c + 1 < self.cols).then(|| self.index(r, c + 1));
        let down = (r + 1 < self.rows).then(|| self.index(r + 1, c));
        [up, left, right, down].into_iter().flatten()
    }

    /// Euclidean distance between two neurons' lattice positions.
    pub fn lattice_distance(&self, a: usize, b: usize) -> f64 {
        let (ra, ca) = self.coords(a);
        let (rb, cb) = self.coords(b);
        let dr = ra as f64 - rb as f64;
        let dc = ca as f64 - cb as f64;
        (dr * dr + dc * dc).sqrt()
    }

    fn check_input(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.dim {
            return validation(format!("input has {} entries, lattice dim is {}", x.len(), self.dim));
        }
        Ok(())
    }

    /// Net input `s_ij = |x - w_ij|` for every neuron.
    pub fn distances(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.check_input(x)?;
        Ok(self.weights.chunks_exact(self.dim).map(|w| sq_dist(x, w).sqrt()).collect())
    }

    /// Activity `y_ij = exp(-s_ij / sigma)`.
    pub fn activity(&self, x: &[f64], sigma: f64) -> Result<ActivityMap> {
        let values = self.distances(x)?.into_iter().map(|s| (-s / sigma).exp()).collect();
        Ok(ActivityMap {
            rows: self.rows,
            cols: self.cols,
            values,
        })
    }

    /// Best-matching unit: smallest distance, ties to the lowest row-major index.
    ///
    /// Equivalent to the argmax of [`Lattice::activity`] but immune to the
    /// exponential underflowing for distant inputs.
    pub fn best_match(&self, x: &[f64]) -> Result<usize> {
        self.check_input(x)?;
        Ok(self.best_match_unchecked(x))
    }

    pub(crate) fn best_match_unchecked(&self, x: &[f64]) -> usize {
        let mut best = 0;
        let mut best_d = f64::INFINITY;
        for (n, w) in self.weights.chunks_exact(self.dim).enumerate() {
            let d = sq_dist(x, w);
            if d < best_d {
                best_d = d;
                best = n;
            }
        }
        best
    }

    /// The two best-matching units, in order.
    pub fn best_two(&self, x: &[f64]) -> Result<(usize, usize)> {
        self.check_input(x)?;
        if self.len() < 2 {
            return validation("need at least two neurons");
        }
        let (mut b1, mut d1) = (usize::MAX, f64::INFINITY);
        let (mut b2, mut d2) = (usize::MAX, f64::INFINITY);
        for (n, w) in self.weights.chunks_exact(self.dim).enumerate() {
            let d = sq_dist(x, w);
            if d < d1 {
                (b2, d2) = (b1, d1);
                (b1, d1) = (n, d);
            } else if d < d2 {
                (b2, d2) = (n, d);
            }
        }
        Ok((b1, b2))
    }

    /// One adaptation step with explicit rate and radius:
    /// `w_ijk += alpha * G(winner, ij) * (x_k - w_ijk)`.
    pub fn train_step(&mut self, x: &[f64], alpha: f64, sigma_r: f64, neighborhood: Neighborhood) -> Result<usize> {
        self.check_input(x)?;
        let winner = self.best_match_unchecked(x);
        self.adapt_around(winner, x, alpha, sigma_r, neighborhood);
        Ok(winner)
    }

    pub(crate) fn adapt_around(&mut self, winner: usize, x: &[f64], alpha: f64, sigma_r: f64, neighborhood: Neighborhood) {
        let denom = 2.0 * sigma_r * sigma_r;
        for n in 0..self.len() {
            let d = self.lattice_distance(winner, n);
            let g = neighborhood.kernel(d, denom);
            let rate = alpha * g;
            if rate == 0.0 {
                continue;
            }
            for (w, &xk) in self.weight_mut(n).iter_mut().zip(x) {
                *w += rate * (xk - *w);
            }
        }
    }

    /// Moves one neuron toward `x` by `rate`.
    pub(crate) fn pull(&mut self, neuron: usize, x: &[f64], rate: f64) {
        for (w, &xk) in self.weight_mut(neuron).iter_mut().zip(x) {
            *w += rate * (xk - *w);
        }
    }

    /// Seeded online training; inputs are reshuffled every epoch and the
    /// step index runs over all presentations.
    pub fn train(&mut self, inputs: &[Vec<f64>], params: &SomParams) -> Result<()> {
        self.train_observed(inputs, params, |_, _| {})
    }

    /// Like [`Lattice::train`], calling `observer(lattice, presentations)`
    /// after every presentation.
    pub fn train_observed(
        &mut self,
        inputs: &[Vec<f64>],
        params: &SomParams,
        mut observer: impl FnMut(&Lattice, u64),
    ) -> Result<()> {
        params.validate()?;
        if inputs.is_empty() {
            return validation("no training inputs");
        }
        for x in inputs {
            self.check_input(x)?;
        }
        let total = params.epochs * inputs.len();
        let schedule = Schedule::new(params, self, total);
        let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
        let mut order: Vec<usize> = (0..inputs.len()).collect();
        let mut t = 0usize;
        for _ in 0..params.epochs {
            order.shuffle(&mut rng);
            for &i in &order {
                let x = &inputs[i];
                let winner = self.best_match_unchecked(x);
                self.adapt_around(winner, x, schedule.alpha(t), schedule.sigma_r(t), params.neighborhood);
                t += 1;
                observer(self, t as u64);
            }
        }
        Ok(())
    }

    /// Mean distance from each input to its best-matching weight vector.
    pub fn quantization_error(&self, inputs: &[Vec<f64>]) -> Result<f64> {
        if inputs.is_empty() {
            return validation("no inputs");
        }
        let mut total = 0.0;
        for x in inputs {
            self.check_input(x)?;
            let w = self.best_match_unchecked(x);
            total += sq_dist(x, self.weight(w)).sqrt();
        }
        Ok(total / inputs.len() as f64)
    }

    /// Fraction of inputs whose two best-matching units are not direct
    /// (4-connected) lattice neighbors.
    pub fn topographic_error(&self, inputs: &[Vec<f64>]) -> Result<f64> {
        if inputs.is_empty() {
            return validation("no inputs");
        }
        let mut bad = 0usize;
        for x in inputs {
            let (a, b) = self.best_two(x)?;
            if self.lattice_distance(a, b) > 1.0 {
                bad += 1;
            }
        }
        Ok(bad as f64 / inputs.len() as f64)
    }

    /// Mean distance from each neuron to its direct neighbors.
    pub fn u_matrix(&self) -> Vec<f64> {
        (0..self.len())
            .map(|n| {
                let (sum, count) = self
                    .neighbors(n)
                    .fold((0.0, 0usize), |(s, c), m| (s + sq_dist(self.weight(n), self.weight(m)).sqrt(), c + 1));
                if count == 0 {
                    0.0
                } else {
                    sum / count as f64
                }
            })
            .collect()
    }

    /// Inserts a column of new neurons before column `at`.
    pub(crate) fn insert_col(&mut self, at: usize, new: impl Fn(usize) -> Vec<f64>) {
        let cols = self.cols + 1;
        let mut weights = Vec::with_capacity(self.rows * cols * self.dim);
        for r in 0..self.rows {
            for c in 0..cols {
                if c == at {
                    weights.extend(new(r));
                } else {
                    let old = if c < at { c } else { c - 1 };
                    weights.extend_from_slice(self.weight(self.index(r, old)));
                }
            }
        }
        self.cols = cols;
        self.weights = weights;
    }

    /// Inserts a row of new neurons before row `at`.
    pub(crate) fn insert_row(&mut self, at: usize, new: impl Fn(usize) -> Vec<f64>) {
        let width = self.cols * self.dim;
        let mut weights = Vec::with_capacity((self.rows + 1) * width);
        weights.extend_from_slice(&self.weights[..at * width]);
        for c in 0..self.cols {
            weights.extend(new(c));
        }
        weights.extend_from_slice(&self.weights[at * width..]);
        self.rows += 1;
        self.weights = weights;
    }
}

#[inline]
pub(crate) fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Neuron activities over the lattice.
#[derive(Debug, Clone, PartialEq)]
pub struct ActivityMap {
    pub rows: usize,
    pub cols: usize,
    pub values: Vec<f64>,
}

impl ActivityMap {
    /// Row-major index of the strongest activity (first one on ties).
    pub fn winner_index(&self) -> usize {
        let mut best = 0;
        for (n, &v) in self.values.iter().enumerate() {
            if v > self.values[best] {
                best = n;
            }
        }
        best
    }

    pub fn winner(&self) -> (usize, usize) {
        let n = self.winner_index();
        (n / self.cols, n % self.cols)
    }
}

/// Shape of the neighborhood kernel.
///
/// `AsPrinted` is `exp(-d / (2 sigma_r^2))` with the unsquared lattice
/// distance `d`; `Squared` is the conventional `exp(-d^2 / (2 sigma_r^2))`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Neighborhood {
    #[default]
    AsPrinted,
    Squared,
}

impl Neighborhood {
    #[inline]
    fn kernel(self, d: f64, denom: f64) -> f64 {
        match self {
            Neighborhood::AsPrinted => (-d / denom).exp(),
            Neighborhood::Squared => (-d * d / denom).exp(),
        }
    }

    pub fn value(self, d: f64, sigma_r: f64) -> f64 {
        self.kernel(d, 2.0 * sigma_r * sigma_r)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SomParams {
    /// Contrast factor of the activity function.
    pub sigma: f64,
    pub alpha0: f64,
    pub alpha_min: f64,
    /// Initial neighborhood radius; `None` means half the larger lattice side.
    pub sigma_r0: Option<f64>,
    pub sigma_r_min: f64,
    pub epochs: usize,
    pub seed: u64,
    pub neighborhood: Neighborhood,
}

impl Default for SomParams {
    fn default() -> Self {
        Self {
            sigma: 1.0,
            alpha0: 0.1,
            alpha_min: 0.01,
            sigma_r0: None,
            sigma_r_min: 1.0,
            epochs: 10,
            seed: 0,
            neighborhood: Neighborhood::AsPrinted,
        }
    }
}

impl SomParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.alpha_min > 0.0 && self.alpha_min <= self.alpha0 && self.alpha0 <= 1.0) {
            return validation("need 0 < alpha_min <= alpha0 <= 1");
        }
        if !(self.sigma > 0.0) {
            return validation("sigma must be positive");
        }
        if !(self.sigma_r_min > 0.0) || self.sigma_r0.is_some_and(|r0| !(r0 >= self.sigma_r_min)) {
            return validation("need sigma_r0 >= sigma_r_min > 0");
        }
        if self.epochs == 0 {
            return validation("epochs must be positive");
        }
        Ok(())
    }
}

/// Exponential decay of the adaptation rate and neighborhood radius over
/// `total` presentations; step `total - 1` lands exactly on the minimum.
#[derive(Debug, Clone, Copy)]
pub struct Schedule {
    alpha0: f64,
    alpha_min: f64,
    sigma_r0: f64,
    sigma_r_min: f64,
    total: usize,
}

impl Schedule {
    pub fn new(params: &SomParams, lattice: &Lattice, total: usize) -> Self {
        let r0 = params
            .sigma_r0
            .unwrap_or(lattice.rows.max(lattice.cols) as f64 / 2.0)
            .max(params.sigma_r_min);
        Self::from_bounds(params.alpha0, params.alpha_min, r0, params.sigma_r_min, total)
    }

    pub fn from_bounds(alpha0: f64, alpha_min: f64, sigma_r0: f64, sigma_r_min: f64, total: usize) -> Self {
        Self {
            alpha0,
            alpha_min,
            sigma_r0,
            sigma_r_min,
            total,
        }
    }

    fn fraction(&self, t: usize) -> f64 {
        if self.total <= 1 {
            0.0
        } else {
            (t as f64 / (self.total - 1) as f64).min(1.0)
        }
    }

    pub fn alpha(&self, t: usize) -> f64 {
        self.alpha0 * (self.alpha_min / self.alpha0).powf(self.fraction(t))
    }

    pub fn sigma_r(&self, t: usize) -> f64 {
        self.sigma_r0 * (self.sigma_r_min / self.sigma_r0).powf(self.fraction(t))
    }
}
