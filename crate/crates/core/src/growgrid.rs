//! Growing grid: a feature map that starts at 2x2 and inserts whole rows or
//! columns next to its busiest neuron, then fine-tunes at fixed size.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{validation, Error, Result};
use crate::som::{sq_dist, Lattice, Neighborhood, Schedule};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Phase {
    Growth,
    FineTune,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FineTuneNeighborhood {
    /// Winner and its direct neighbors, all at the current rate.
    #[default]
    Direct,
    /// Gaussian kernel over the whole grid with a decaying radius.
    Gaussian,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FineTuneParams {
    pub alpha0: f64,
    pub alpha_min: f64,
    pub epochs: usize,
    pub neighborhood: FineTuneNeighborhood,
    /// Radius bounds, used by the Gaussian neighborhood only.
    pub sigma_r0: f64,
    pub sigma_r_min: f64,
    pub kernel: Neighborhood,
}

impl Default for FineTuneParams {
    fn default() -> Self {
        Self {
            alpha0: 0.1,
            alpha_min: 0.01,
            epochs: 5,
            neighborhood: FineTuneNeighborhood::Direct,
            sigma_r0: 1.0,
            sigma_r_min: 0.5,
            kernel: Neighborhood::AsPrinted,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GgParams {
    /// Presentations per neuron between insertions.
    pub lambda: u64,
    /// Constant growth-phase adaptation rate.
    pub alpha_growth: f64,
    pub sigma: f64,
    pub max_neurons: usize,
    pub qe_stop: Option<f64>,
    pub finetune: FineTuneParams,
    pub seed: u64,
}

impl Default for GgParams {
    fn default() -> Self {
        Self {
            lambda: 30,
            alpha_growth: 0.1,
            sigma: 1.0,
            max_neurons: 900,
            qe_stop: None,
            finetune: FineTuneParams::default(),
            seed: 0,
        }
    }
}

impl GgParams {
    pub fn validate(&self) -> Result<()> {
        if self.lambda < 1 {
            return validation("lambda must be at least 1");
        }
        if !(self.alpha_growth > 0.0 && self.alpha_growth <= 1.0) {
            return validation("alpha_growth must lie in (0, 1]");
        }
        if !(self.sigma > 0.0) {
            return validation("sigma must be positive");
        }
        if self.max_neurons < 4 {
            return validation("max_neurons must be at least 4");
        }
        let ft = &self.finetune;
        if !(ft.alpha_min > 0.0 && ft.alpha_min <= ft.alpha0 && ft.alpha0 <= 1.0) {
            return validation("fine-tune rates need 0 < alpha_min <= alpha0 <= 1");
        }
        if !(ft.sigma_r_min > 0.0 && ft.sigma_r0 >= ft.sigma_r_min) {
            return validation("fine-tune radii need sigma_r0 >= sigma_r_min > 0");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GrowingGrid {
    lattice: Lattice,
    counters: Vec<u64>,
    phase: Phase,
    presentations_since_insertion: u64,
}

/// Hooks into training progress.
pub trait GrowthObserver {
    fn on_insertion(&mut self, _before: &GrowingGrid, _pair: (usize, usize), _after: &GrowingGrid) {}
    /// Called after every presentation with the running presentation total.
    fn on_presentation(&mut self, _grid: &GrowingGrid, _presentations: u64) {}
}

impl GrowthObserver for () {}

impl GrowingGrid {
    /// A 2x2 grid with `U[0, 1)` weights in the growth phase.
    pub fn new(dim: usize, seed: u64) -> Result<Self> {
        Self::from_lattice(Lattice::random(2, 2, dim, seed)?)
    }

    pub fn from_lattice(lattice: Lattice) -> Result<Self> {
        let n = lattice.len();
        Ok(Self {
            lattice,
            counters: vec![0; n],
            phase: Phase::Growth,
            presentations_since_insertion: 0,
        })
    }

    pub fn lattice(&self) -> &Lattice {
        &self.lattice
    }

    pub fn into_lattice(self) -> Lattice {
        self.lattice
    }

    pub fn counters(&self) -> &[u64] {
        &self.counters
    }

    pub fn phase(&self) -> Phase {
        self.phase
    }

    pub fn presentations_since_insertion(&self) -> u64 {
        self.presentations_since_insertion
    }

    pub fn set_counters(&mut self, counters: Vec<u64>) -> Result<()> {
        if counters.len() != self.lattice.len() {
            return validation("counter array shape differs from lattice");
        }
        self.counters = counters;
        Ok(())
    }

    /// One growth-phase presentation: the winner's counter is incremented and
    /// the winner plus its direct neighbors move toward `x` at rate `alpha`.
    pub fn step(&mut self, x: &[f64], alpha: f64) -> Result<usize> {
        let winner = self.lattice.best_match(x)?;
        self.counters[winner] += 1;
        self.pull_neighborhood(winner, x, alpha);
        self.presentations_since_insertion += 1;
        Ok(winner)
    }

    fn pull_neighborhood(&mut self, winner: usize, x: &[f64], alpha: f64) {
        let neighbors: Vec<usize> = self.lattice.neighbors(winner).collect();
        self.lattice.pull(winner, x, alpha);
        for n in neighbors {
            self.lattice.pull(n, x, alpha);
        }
    }

    pub fn insertion_due(&self, params: &GgParams) -> bool {
        self.presentations_since_insertion >= params.lambda * self.lattice.len() as u64
    }

    /// The neuron with the largest counter and, among its direct neighbors,
    /// the one whose weight vector is furthest away. Ties go to the lowest
    /// row-major index.
    pub fn find_insertion_pair(&self) -> (usize, usize) {
        let mut c1 = 0;
        for (n, &lc) in self.counters.iter().enumerate() {
            if lc > self.counters[c1] {
                c1 = n;
            }
        }
        let w1 = self.lattice.weight(c1);
        let mut c2 = usize::MAX;
        let mut best = f64::NEG_INFINITY;
        for n in self.lattice.neighbors(c1) {
            let d = sq_dist(w1, self.lattice.weight(n));
            if d > best {
                best = d;
                c2 = n;
            }
        }
        (c1, c2)
    }

    /// Inserts a full column (same-row pair) or row (same-column pair)
    /// between two adjacent neurons. New weights are the mean of their two
    /// flanking neurons; counters and the presentation count are reset.
    pub fn insert_between(&mut self, c1: usize, c2: usize) -> Result<()> {
        let l = &self.lattice;
        if c1 >= l.len() || c2 >= l.len() {
            return Err(Error::Logic(format!("neuron index out of range: ({c1}, {c2})")));
        }
        let (r1, k1) = l.coords(c1);
        let (r2, k2) = l.coords(c2);
        if r1 == r2 && k1.abs_diff(k2) == 1 {
            let lo = k1.min(k2);
            let snapshot = l.clone();
            self.lattice.insert_col(lo + 1, |r| {
                midpoint(snapshot.weight(snapshot.index(r, lo)), snapshot.weight(snapshot.index(r, lo + 1)))
            });
        } else if k1 == k2 && r1.abs_diff(r2) == 1 {
            let lo = r1.min(r2);
            let snapshot = l.clone();
            self.lattice.insert_row(lo + 1, |c| {
                midpoint(snapshot.weight(snapshot.index(lo, c)), snapshot.weight(snapshot.index(lo + 1, c)))
            });
        } else {
            return Err(Error::Logic(format!("neurons {c1} and {c2} are not direct neighbors")));
        }
        self.counters = vec![0; self.lattice.len()];
        self.presentations_since_insertion = 0;
        Ok(())
    }

    /// Growth phase: repeated shuffled passes over `inputs` with insertions
    /// whenever due, until the grid holds `max_neurons` or its quantization
    /// error drops to `qe_stop`. Leaves the grid in the fine-tune phase.
    pub fn grow(&mut self, inputs: &[Vec<f64>], params: &GgParams) -> Result<()> {
        self.grow_observed(inputs, params, &mut ())
    }

    pub fn grow_observed(&mut self, inputs: &[Vec<f64>], params: &GgParams, observer: &mut impl GrowthObserver) -> Result<()> {
        params.validate()?;
        self.check_inputs(inputs)?;
        if self.phase != Phase::Growth {
            return Err(Error::Logic("grid already left the growth phase".into()));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
        let mut order: Vec<usize> = (0..inputs.len()).collect();
        let mut presentations = 0u64;
        let mut done = self.growth_finished(inputs, params)?;
        while !done {
            order.shuffle(&mut rng);
            for &i in &order {
                self.step(&inputs[i], params.alpha_growth)?;
                presentations += 1;
                observer.on_presentation(self, presentations);
                if self.insertion_due(params) {
                    let before = self.clone();
                    let pair = self.find_insertion_pair();
                    self.insert_between(pair.0, pair.1)?;
                    observer.on_insertion(&before, pair, self);
                    if self.growth_finished(inputs, params)? {
                        done = true;
                        break;
                    }
                }
            }
        }
        self.phase = Phase::FineTune;
        Ok(())
    }

    fn growth_finished(&self, inputs: &[Vec<f64>], params: &GgParams) -> Result<bool> {
        if self.lattice.len() >= params.max_neurons {
            return Ok(true);
        }
        match params.qe_stop {
            Some(stop) => Ok(self.lattice.quantization_error(inputs)? <= stop),
            None => Ok(false),
        }
    }

    /// Fixed-size training with an exponentially decaying rate.
    pub fn fine_tune(&mut self, inputs: &[Vec<f64>], params: &GgParams) -> Result<()> {
        self.fine_tune_observed(inputs, params, &mut ())
    }

    pub fn fine_tune_observed(&mut self, inputs: &[Vec<f64>], params: &GgParams, observer: &mut impl GrowthObserver) -> Result<()> {
        params.validate()?;
        self.check_inputs(inputs)?;
        if self.phase != Phase::FineTune {
            return Err(Error::Logic("fine-tuning requires the fine-tune phase".into()));
        }
        let ft = &params.finetune;
        let total = ft.epochs * inputs.len();
        let schedule = Schedule::from_bounds(ft.alpha0, ft.alpha_min, ft.sigma_r0, ft.sigma_r_min, total);
        let mut rng = ChaCha8Rng::seed_from_u64(params.seed ^ 0x9e37_79b9_7f4a_7c15);
        let mut order: Vec<usize> = (0..inputs.len()).collect();
        let mut t = 0usize;
        for _ in 0..ft.epochs {
            order.shuffle(&mut rng);
            for &i in &order {
                let x = &inputs[i];
                let winner = self.lattice.best_match(x)?;
                let alpha = schedule.alpha(t);
                match ft.neighborhood {
                    FineTuneNeighborhood::Direct => self.pull_neighborhood(winner, x, alpha),
                    FineTuneNeighborhood::Gaussian => {
                        self.lattice.adapt_around(winner, x, alpha, schedule.sigma_r(t), ft.kernel)
                    }
                }
                t += 1;
                observer.on_presentation(self, t as u64);
            }
        }
        Ok(())
    }

    /// Growth followed by fine-tuning.
    pub fn train(dim: usize, inputs: &[Vec<f64>], params: &GgParams) -> Result<Self> {
        let mut g = Self::new(dim, params.seed)?;
        g.grow(inputs, params)?;
        g.fine_tune(inputs, params)?;
        Ok(g)
    }

    fn check_inputs(&self, inputs: &[Vec<f64>]) -> Result<()> {
        if inputs.is_empty() {
            return validation("no training inputs");
        }
        if let Some(x) = inputs.iter().find(|x| x.len() != self.lattice.dim()) {
            return validation(format!("input has {} entries, grid dim is {}", x.len(), self.lattice.dim()));
        }
        Ok(())
    }
}

fn midpoint(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| 0.5 * (x + y)).collect()
}
