//! Sampling-based estimate of violation probabilities.
//!
//! Trajectories are drawn from the base model and the estimator's observer
//! is advanced alongside each one; a sample counts as a hit when it enters
//! the bad set within the horizon. Samples are split into fixed-size chunks,
//! chunk `c` using a ChaCha8 stream `(seed, c)`, so results do not depend on
//! the number of worker threads.

use std::fmt::Debug;
use std::hash::Hash;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{Error, Result};
use crate::estimator::{
    build_current_estimator, build_initial_estimator, EstimatorGmdp, EstimatorKind,
};
use crate::gmdp::FiniteGmdp;
use crate::reachability::{value_iteration, ReachabilityResult};
use crate::scalar::Scalar;

pub const CHUNK_SIZE: usize = 4096;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum InputPlan {
    Sequence(Vec<usize>),
    /// Replay the maximizing inputs found by value iteration.
    WorstCase,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimulationConfig {
    pub samples: usize,
    pub horizon: usize,
    pub inputs: InputPlan,
    pub seed: u64,
    pub confidence: f64,
}

impl SimulationConfig {
    pub fn new(samples: usize, horizon: usize, inputs: InputPlan, seed: u64) -> Self {
        Self {
            samples,
            horizon,
            inputs,
            seed,
            confidence: 0.999,
        }
    }

    fn validate(&self, num_inputs: usize) -> Result<()> {
        if self.samples == 0 {
            return Err(Error::InvalidParameter("sample count must be >= 1".into()));
        }
        if !(self.confidence > 0.0 && self.confidence < 1.0) {
            return Err(Error::InvalidParameter(
                "confidence must lie in (0, 1)".into(),
            ));
        }
        if let InputPlan::Sequence(seq) = &self.inputs {
            if seq.len() != self.horizon {
                return Err(Error::InvalidParameter(format!(
                    "input sequence has length {} but the horizon is {}",
                    seq.len(),
                    self.horizon
                )));
            }
            if let Some(u) = seq.iter().find(|&&u| u >= num_inputs) {
                return Err(Error::UnknownInput(u.to_string()));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Estimate {
    pub p_hat: f64,
    pub ci_lo: f64,
    pub ci_hi: f64,
    pub samples: usize,
    pub hits: u64,
    pub seed: u64,
    pub confidence: f64,
    /// `histogram[k]`: samples first entering the bad set at step `k`.
    pub histogram: Vec<u64>,
}

/// Inverse-CDF draw over a sparse row in stored order.
pub fn sample_successor<S: Scalar, R: Rng + ?Sized>(row: &[(usize, S)], rng: &mut R) -> usize {
    if let [(only, _)] = row {
        return *only;
    }
    let r: f64 = rng.random();
    let mut acc = 0.0;
    for (t, p) in row {
        acc += p.to_f64_lossy();
        if r < acc {
            return *t;
        }
    }
    row.last().expect("kernel rows are non-empty").0
}

/// State sequence of length `inputs.len() + 1` starting at `x0`.
pub fn sample_trajectory<S: Scalar, R: Rng + ?Sized>(
    model: &FiniteGmdp<S>,
    x0: usize,
    inputs: &[usize],
    rng: &mut R,
) -> Vec<usize> {
    let mut path = Vec::with_capacity(inputs.len() + 1);
    path.push(x0);
    let mut x = x0;
    for &u in inputs {
        x = sample_successor(model.row(x, u), rng);
        path.push(x);
    }
    path
}

/// Two-sided Wilson score interval.
pub fn wilson_interval(hits: u64, n: usize, confidence: f64) -> (f64, f64) {
    let z = Normal::new(0.0, 1.0)
        .expect("standard normal")
        .inverse_cdf(1.0 - (1.0 - confidence) / 2.0);
    let n = n as f64;
    let p = hits as f64 / n;
    let z2 = z * z;
    let denom = 1.0 + z2 / n;
    let center = (p + z2 / (2.0 * n)) / denom;
    let half = z / denom * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt();
    ((center - half).max(0.0), (center + half).min(1.0))
}

/// Step at which one sampled run first hits the bad set.
fn run_once<S: Scalar, Q, R: Rng>(
    model: &FiniteGmdp<S>,
    est: &EstimatorGmdp<S, Q>,
    x0: usize,
    config: &SimulationConfig,
    policy: Option<&ReachabilityResult<S>>,
    rng: &mut R,
) -> Option<usize>
where
    Q: Clone + Eq + Hash + Ord + Debug,
{
    let mut s = est.initial_for(x0).expect("checked initial state");
    let mut x = x0;
    if est.is_bad(s) {
        return Some(0);
    }
    for k in 0..config.horizon {
        let u = match (&config.inputs, policy) {
            (InputPlan::Sequence(seq), _) => seq[k],
            (InputPlan::WorstCase, Some(r)) => r.action(config.horizon - k, s),
            (InputPlan::WorstCase, None) => 0,
        };
        x = sample_successor(model.row(x, u), rng);
        s = est
            .successor(s, u, x)
            .expect("estimator mirrors every base transition");
        if est.is_bad(s) {
            return Some(k + 1);
        }
    }
    None
}

fn estimate_on<S: Scalar, Q>(
    model: &FiniteGmdp<S>,
    est: &EstimatorGmdp<S, Q>,
    x0: usize,
    config: &SimulationConfig,
) -> Result<Estimate>
where
    Q: Clone + Eq + Hash + Ord + Debug + Send + Sync,
{
    if est.initial_for(x0).is_none() {
        return Err(Error::NotInitial(model.state_name(x0).to_string()));
    }
    let policy = match config.inputs {
        InputPlan::WorstCase => Some(value_iteration(est, config.horizon)),
        InputPlan::Sequence(_) => None,
    };
    let chunks = config.samples.div_ceil(CHUNK_SIZE);
    let histogram = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
            rng.set_stream(c as u64);
            let count = CHUNK_SIZE.min(config.samples - c * CHUNK_SIZE);
            let mut hist = vec![0u64; config.horizon + 1];
            for _ in 0..count {
                if let Some(k) = run_once(model, est, x0, config, policy.as_ref(), &mut rng) {
                    hist[k] += 1;
                }
            }
            hist
        })
        .reduce(
            || vec![0u64; config.horizon + 1],
            |mut a, b| {
                a.iter_mut().zip(b).for_each(|(x, y)| *x += y);
                a
            },
        );
    let hits: u64 = histogram.iter().sum();
    let (ci_lo, ci_hi) = wilson_interval(hits, config.samples, config.confidence);
    Ok(Estimate {
        p_hat: hits as f64 / config.samples as f64,
        ci_lo,
        ci_hi,
        samples: config.samples,
        hits,
        seed: config.seed,
        confidence: config.confidence,
        histogram,
    })
}

pub fn estimate_violation<S: Scalar>(
    model: &FiniteGmdp<S>,
    kind: EstimatorKind,
    eps: &S,
    x0: usize,
    config: &SimulationConfig,
) -> Result<Estimate> {
    config.validate(model.num_inputs())?;
    if x0 >= model.num_states() {
        return Err(Error::UnknownState(x0.to_string()));
    }
    match kind {
        EstimatorKind::Initial => {
            estimate_on(model, &build_initial_estimator(model, eps)?, x0, config)
        }
        EstimatorKind::Current => {
            estimate_on(model, &build_current_estimator(model, eps)?, x0, config)
        }
    }
}
