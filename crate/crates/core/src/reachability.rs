//! Bounded-horizon reachability of the bad set on estimator gMDPs and the
//! resulting opacity verdicts.

use std::fmt::Debug;
use std::hash::Hash;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::estimator::{
    build_current_estimator, build_initial_estimator, current_state_estimate,
    initial_state_estimate, EstimatorGmdp, EstimatorKind,
};
use crate::gmdp::FiniteGmdp;
use crate::scalar::{approx_le, Scalar};

/// Largest number of input sequences (or history branches) enumerated by the
/// brute-force oracles.
pub const ENUMERATION_BOUND: u128 = 1_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum StateClass {
    Bad,
    /// The bad set is unreachable.
    NeverBad,
    Other,
}

/// Backward graph reachability from the bad set over positive-probability edges.
pub fn classify_states<S: Scalar, Q>(est: &EstimatorGmdp<S, Q>) -> Vec<StateClass>
where
    Q: Clone + Eq + Hash + Ord + Debug,
{
    let n = est.num_states();
    let mut preds: Vec<Vec<usize>> = vec![Vec::new(); n];
    for s in 0..n {
        for u in 0..est.num_inputs() {
            for (t, _) in est.row(s, u) {
                preds[*t].push(s);
            }
        }
    }
    let mut reaches = vec![false; n];
    let mut stack: Vec<usize> = est.bad_states().collect();
    for &s in &stack {
        reaches[s] = true;
    }
    while let Some(t) = stack.pop() {
        for &s in &preds[t] {
            if !reaches[s] {
                reaches[s] = true;
                stack.push(s);
            }
        }
    }
    (0..n)
        .map(|s| {
            if est.is_bad(s) {
                StateClass::Bad
            } else if reaches[s] {
                StateClass::Other
            } else {
                StateClass::NeverBad
            }
        })
        .collect()
}

#[derive(Debug, Clone)]
pub struct ReachabilityResult<S> {
    pub horizon: usize,
    /// Maximal probability of reaching the bad set within `horizon` steps, per estimator state.
    pub p: Vec<S>,
    /// `(base initial state, value at its estimator initial state)` in X₀ order.
    pub per_initial: Vec<(usize, S)>,
    pub classification: Vec<StateClass>,
    /// `policy[h - 1][s]`: maximizing input with `h` steps to go.
    pub policy: Vec<Vec<usize>>,
    /// Sweeps actually computed before a fixed point was detected.
    pub sweeps: usize,
}

impl<S: Scalar> ReachabilityResult<S> {
    /// Input chosen at `s` when `remaining` steps are left.
    pub fn action(&self, remaining: usize, s: usize) -> usize {
        if remaining == 0 || self.policy.is_empty() {
            return 0;
        }
        self.policy[remaining.min(self.policy.len()) - 1][s]
    }

    pub fn value_for(&self, x0: usize) -> Option<&S> {
        self.per_initial
            .iter()
            .find(|(b, _)| *b == x0)
            .map(|(_, v)| v)
    }
}

/// Synchronous value iteration over the states classified `Other`.
pub fn value_iteration<S: Scalar, Q>(est: &EstimatorGmdp<S, Q>, n: usize) -> ReachabilityResult<S>
where
    Q: Clone + Eq + Hash + Ord + Debug + Send + Sync,
{
    let classification = classify_states(est);
    let mut p: Vec<S> = classification
        .iter()
        .map(|c| {
            if *c == StateClass::Bad {
                S::one()
            } else {
                S::zero()
            }
        })
        .collect();
    let mut policy: Vec<Vec<usize>> = Vec::with_capacity(n);
    let mut sweeps = 0;
    for _ in 0..n {
        let (next, choice): (Vec<S>, Vec<usize>) = (0..est.num_states())
            .into_par_iter()
            .map(|s| {
                if classification[s] != StateClass::Other {
                    return (p[s].clone(), 0);
                }
                let mut best = S::zero();
                let mut arg = 0;
                for u in 0..est.num_inputs() {
                    let v = est
                        .row(s, u)
                        .iter()
                        .fold(S::zero(), |acc, (t, pr)| acc + pr.clone() * p[*t].clone());
                    if u == 0 || v > best {
                        best = v;
                        arg = u;
                    }
                }
                (best, arg)
            })
            .unzip();
        sweeps += 1;
        policy.push(choice);
        let fixed = next == p;
        p = next;
        if fixed {
            break;
        }
    }
    // Past a fixed point the values, and hence the maximizers, repeat.
    while policy.len() < n {
        let last = policy.last().cloned().unwrap_or_default();
        policy.push(last);
    }
    let per_initial = est
        .initial_states()
        .iter()
        .map(|(x0, s)| (*x0, p[*s].clone()))
        .collect();
    ReachabilityResult {
        horizon: n,
        p,
        per_initial,
        classification,
        policy,
        sweeps,
    }
}

fn initial_estimator_state<S: Scalar, Q>(est: &EstimatorGmdp<S, Q>, x0: usize) -> Result<usize>
where
    Q: Clone + Eq + Hash + Ord + Debug,
{
    est.initial_for(x0).ok_or_else(|| {
        let name = est
            .base_state_names()
            .get(x0)
            .cloned()
            .unwrap_or_else(|| x0.to_string());
        Error::NotInitial(name)
    })
}

/// Per-step `(violation mass, surviving mass)` under a fixed input sequence;
/// entry 0 is the time-0 split. Bad states absorb.
pub fn violation_profile<S: Scalar, Q>(
    est: &EstimatorGmdp<S, Q>,
    x0: usize,
    inputs: &[usize],
) -> Result<Vec<(S, S)>>
where
    Q: Clone + Eq + Hash + Ord + Debug,
{
    let start = initial_estimator_state(est, x0)?;
    if let Some(&u) = inputs.iter().find(|&&u| u >= est.num_inputs()) {
        return Err(Error::UnknownInput(u.to_string()));
    }
    let mut dist = vec![S::zero(); est.num_states()];
    let mut violation = S::zero();
    if est.is_bad(start) {
        violation = S::one();
    } else {
        dist[start] = S::one();
    }
    let surviving = |d: &[S]| d.iter().fold(S::zero(), |a, v| a + v.clone());
    let mut profile = vec![(violation.clone(), surviving(&dist))];
    for &u in inputs {
        let mut next = vec![S::zero(); est.num_states()];
        for (s, mass) in dist.iter().enumerate() {
            if mass.is_zero() {
                continue;
            }
            for (t, pr) in est.row(s, u) {
                let flow = mass.clone() * pr.clone();
                if est.is_bad(*t) {
                    violation = violation + flow;
                } else {
                    next[*t] = next[*t].clone() + flow;
                }
            }
        }
        dist = next;
        profile.push((violation.clone(), surviving(&dist)));
    }
    Ok(profile)
}

/// Probability of entering the bad set within `inputs.len()` steps under the
/// fixed input sequence.
pub fn exact_violation_probability<S: Scalar, Q>(
    est: &EstimatorGmdp<S, Q>,
    x0: usize,
    inputs: &[usize],
) -> Result<S>
where
    Q: Clone + Eq + Hash + Ord + Debug,
{
    let profile = violation_profile(est, x0, inputs)?;
    Ok(profile
        .last()
        .map(|(v, _)| v.clone())
        .unwrap_or_else(S::zero))
}

fn sequence_count(inputs: usize, n: usize) -> Result<u128> {
    let mut count: u128 = 1;
    for _ in 0..n {
        count = count.saturating_mul(inputs as u128);
        if count > ENUMERATION_BOUND {
            return Err(Error::EnumerationBound {
                count,
                bound: ENUMERATION_BOUND,
            });
        }
    }
    Ok(count)
}

/// Maximum of [`exact_violation_probability`] over every fixed input sequence
/// of length `n`. With several inputs this can fall below the value-iteration
/// result, which lets the input react to the realized path.
pub fn open_loop_max_violation<S: Scalar, Q>(
    est: &EstimatorGmdp<S, Q>,
    x0: usize,
    n: usize,
) -> Result<S>
where
    Q: Clone + Eq + Hash + Ord + Debug,
{
    initial_estimator_state(est, x0)?;
    let m = est.num_inputs();
    let count = sequence_count(m, n)?;
    let mut seq = vec![0usize; n];
    let mut best = S::zero();
    for _ in 0..count {
        let v = exact_violation_probability(est, x0, &seq)?;
        if v > best {
            best = v;
        }
        for digit in seq.iter_mut().rev() {
            *digit += 1;
            if *digit < m {
                break;
            }
            *digit = 0;
        }
    }
    Ok(best)
}

/// Maximal violation probability over all non-anticipative input sequences,
/// by exhaustive expansion of the tree of realized paths: at each node every
/// input is tried and the best is kept. No values are shared between nodes.
pub fn brute_force_max_violation<S: Scalar, Q>(
    est: &EstimatorGmdp<S, Q>,
    x0: usize,
    n: usize,
) -> Result<S>
where
    Q: Clone + Eq + Hash + Ord + Debug,
{
    let start = initial_estimator_state(est, x0)?;
    sequence_count(est.num_inputs(), n)?;
    let mut budget = ENUMERATION_BOUND * 10;
    expand(est, start, n, &mut budget)
}

fn expand<S: Scalar, Q>(
    est: &EstimatorGmdp<S, Q>,
    s: usize,
    remaining: usize,
    budget: &mut u128,
) -> Result<S>
where
    Q: Clone + Eq + Hash + Ord + Debug,
{
    if est.is_bad(s) {
        return Ok(S::one());
    }
    if remaining == 0 {
        return Ok(S::zero());
    }
    if *budget == 0 {
        return Err(Error::EnumerationBound {
            count: ENUMERATION_BOUND * 10 + 1,
            bound: ENUMERATION_BOUND * 10,
        });
    }
    *budget -= 1;
    let mut best = S::zero();
    for u in 0..est.num_inputs() {
        let mut v = S::zero();
        for (t, pr) in est.row(s, u) {
            v = v + pr.clone() * expand(est, *t, remaining - 1, budget)?;
        }
        if v > best {
            best = v;
        }
    }
    Ok(best)
}

/// Same quantity as [`brute_force_max_violation`], computed on the base model
/// without building an estimator: a path is revealing once the estimate
/// recomputed from its output history lies inside the secret set.
pub fn history_max_violation<S: Scalar>(
    model: &FiniteGmdp<S>,
    kind: EstimatorKind,
    eps: &S,
    x0: usize,
    n: usize,
) -> Result<S> {
    if !model.is_initial(x0) {
        return Err(Error::NotInitial(model.state_name(x0).to_string()));
    }
    let mut path = vec![x0];
    let mut budget = ENUMERATION_BOUND * 10;
    history_expand(model, kind, eps, &mut path, n, &mut budget)
}

fn history_revealing<S: Scalar>(
    model: &FiniteGmdp<S>,
    kind: EstimatorKind,
    eps: &S,
    path: &[usize],
) -> Result<bool> {
    let outputs: Vec<Vec<S>> = path.iter().map(|&x| model.output(x).to_vec()).collect();
    match kind {
        EstimatorKind::Initial => Ok(initial_state_estimate(model, eps, &outputs)?
            .iter()
            .all(|&x| model.is_secret(x))),
        EstimatorKind::Current => {
            // Only steps after time 0 can reveal.
            for k in 2..=outputs.len() {
                if current_state_estimate(model, eps, &outputs[..k])?
                    .iter()
                    .all(|&x| model.is_secret(x))
                {
                    return Ok(true);
                }
            }
            Ok(false)
        }
    }
}

fn history_expand<S: Scalar>(
    model: &FiniteGmdp<S>,
    kind: EstimatorKind,
    eps: &S,
    path: &mut Vec<usize>,
    remaining: usize,
    budget: &mut u128,
) -> Result<S> {
    if history_revealing(model, kind, eps, path)? {
        return Ok(S::one());
    }
    if remaining == 0 {
        return Ok(S::zero());
    }
    if *budget == 0 {
        return Err(Error::EnumerationBound {
            count: ENUMERATION_BOUND * 10 + 1,
            bound: ENUMERATION_BOUND * 10,
        });
    }
    *budget -= 1;
    let x = *path.last().expect("non-empty path");
    let mut best = S::zero();
    for u in 0..model.num_inputs() {
        let mut v = S::zero();
        for (t, pr) in model.row(x, u).to_vec() {
            path.push(t);
            let w = history_expand(model, kind, eps, path, remaining - 1, budget)?;
            path.pop();
            v = v + pr * w;
        }
        if v > best {
            best = v;
        }
    }
    Ok(best)
}

#[derive(Debug, Clone)]
pub struct OpacityVerdict<S> {
    pub kind: EstimatorKind,
    pub eps: S,
    pub lambda: S,
    pub horizon: usize,
    pub opaque: bool,
    /// Initial state with the largest violation probability above `1 - lambda`.
    pub witness: Option<usize>,
    /// `min over x₀ of (1 - lambda) - per_initial(x₀)`.
    pub margin: S,
    pub per_initial: Vec<(usize, S)>,
    pub p: Vec<S>,
    pub estimator_states: usize,
    pub estimator_labels: Vec<String>,
    pub initial_assumption_holds: bool,
    pub base_state_names: Vec<String>,
}

impl<S: Scalar> OpacityVerdict<S> {
    pub fn witness_name(&self) -> Option<&str> {
        self.witness.map(|x| self.base_state_names[x].as_str())
    }

    pub fn value_for(&self, x0: usize) -> Option<&S> {
        self.per_initial
            .iter()
            .find(|(b, _)| *b == x0)
            .map(|(_, v)| v)
    }
}

/// Threshold test applied to a reachability result.
pub fn verdict_from<S: Scalar, Q>(
    est: &EstimatorGmdp<S, Q>,
    result: ReachabilityResult<S>,
    eps: &S,
    lambda: &S,
) -> OpacityVerdict<S>
where
    Q: Clone + Eq + Hash + Ord + Debug,
{
    let threshold = S::one() - lambda.clone();
    let mut margin: Option<S> = None;
    let mut witness: Option<(usize, S)> = None;
    for (x0, v) in &result.per_initial {
        let gap = threshold.clone() - v.clone();
        if margin.as_ref().is_none_or(|m| gap < *m) {
            margin = Some(gap);
        }
        if !approx_le(v, &threshold) && witness.as_ref().is_none_or(|(_, w)| v > w) {
            witness = Some((*x0, v.clone()));
        }
    }
    OpacityVerdict {
        kind: est.kind(),
        eps: eps.clone(),
        lambda: lambda.clone(),
        horizon: result.horizon,
        opaque: witness.is_none(),
        witness: witness.map(|(x, _)| x),
        margin: margin.unwrap_or(threshold),
        per_initial: result.per_initial,
        p: result.p,
        estimator_states: est.num_states(),
        estimator_labels: est.labels().to_vec(),
        initial_assumption_holds: est.initial_assumption_holds(),
        base_state_names: est.base_state_names().to_vec(),
    }
}

fn check_lambda<S: Scalar>(lambda: &S) -> Result<()> {
    if *lambda < S::zero() || *lambda > S::one() {
        return Err(Error::InvalidParameter(format!(
            "lambda must lie in [0, 1], got {}",
            lambda.to_literal()
        )));
    }
    Ok(())
}

pub fn verify_opacity<S: Scalar>(
    model: &FiniteGmdp<S>,
    kind: EstimatorKind,
    eps: &S,
    lambda: &S,
    n: usize,
) -> Result<OpacityVerdict<S>> {
    check_lambda(lambda)?;
    Ok(match kind {
        EstimatorKind::Initial => {
            let est = build_initial_estimator(model, eps)?;
            let result = value_iteration(&est, n);
            verdict_from(&est, result, eps, lambda)
        }
        EstimatorKind::Current => {
            let est = build_current_estimator(model, eps)?;
            let result = value_iteration(&est, n);
            verdict_from(&est, result, eps, lambda)
        }
    })
}
