#![allow(dead_code)]

use num_rational::BigRational;
use opaquemdp::{FiniteGmdp, GmdpDocument};
use rand::Rng;

pub fn q(n: i64, d: i64) -> BigRational {
    BigRational::new(n.into(), d.into())
}

/// Random model with exact probabilities `w / Σw` and outputs on a 0.1 grid,
/// so ε-balls with ε ∈ {0, 0.1} are non-trivial.
pub fn random_document<R: Rng>(
    rng: &mut R,
    max_states: usize,
    max_inputs: usize,
) -> GmdpDocument<BigRational> {
    let n = rng.random_range(1..=max_states);
    let m = rng.random_range(1..=max_inputs);
    let states: Vec<String> = (0..n).map(|i| format!("x{i}")).collect();
    let inputs: Vec<String> = (0..m).map(|i| format!("u{i}")).collect();
    let mut initial: Vec<String> = states
        .iter()
        .filter(|_| rng.random_bool(0.5))
        .cloned()
        .collect();
    if initial.is_empty() {
        initial.push(states[rng.random_range(0..n)].clone());
    }
    let secret: Vec<String> = states
        .iter()
        .filter(|_| rng.random_bool(0.4))
        .cloned()
        .collect();
    let mut doc = GmdpDocument::new(states.clone(), inputs.clone())
        .with_initial(initial)
        .with_secret(secret);
    for s in &states {
        doc = doc.output(s, vec![q(rng.random_range(0..4), 10)]);
    }
    for s in &states {
        for u in &inputs {
            let k = rng.random_range(1..=n.min(3));
            let mut targets: Vec<usize> = (0..n).collect();
            for i in 0..k {
                let j = rng.random_range(i..n);
                targets.swap(i, j);
            }
            let weights: Vec<i64> = (0..k).map(|_| rng.random_range(1..=5)).collect();
            let total: i64 = weights.iter().sum();
            for (t, w) in targets[..k].iter().zip(weights) {
                doc = doc.transition(s, u, &states[*t], q(w, total));
            }
        }
    }
    doc
}

pub fn random_exact<R: Rng>(
    rng: &mut R,
    max_states: usize,
    max_inputs: usize,
) -> FiniteGmdp<BigRational> {
    random_document(rng, max_states, max_inputs)
        .into_model()
        .expect("generated model is valid")
}

pub fn random_f64<R: Rng>(rng: &mut R, max_states: usize, max_inputs: usize) -> FiniteGmdp<f64> {
    random_exact(rng, max_states, max_inputs).convert()
}

/// Random distribution with exact weights over `support` distinct labels.
pub fn random_distribution<R: Rng>(
    rng: &mut R,
    support: usize,
    labels: usize,
) -> Vec<(usize, BigRational)> {
    let mut ids: Vec<usize> = (0..labels).collect();
    for i in 0..support {
        let j = rng.random_range(i..labels);
        ids.swap(i, j);
    }
    let weights: Vec<i64> = (0..support).map(|_| rng.random_range(1..=9)).collect();
    let total: i64 = weights.iter().sum();
    ids[..support]
        .iter()
        .zip(weights)
        .map(|(i, w)| (*i, q(w, total)))
        .collect()
}

/// Largest mass a coupling can put on `related`, by the subset formula
/// `min over A ⊆ supp φ of φ(supp φ \ A) + θ(N(A))`, enumerated exhaustively.
pub fn subset_oracle<F: Fn(usize, usize) -> bool>(
    phi: &[(usize, BigRational)],
    theta: &[(usize, BigRational)],
    related: F,
) -> BigRational {
    let mut best: Option<BigRational> = None;
    for mask in 0u32..(1 << phi.len()) {
        let mut value = q(0, 1);
        for (i, (_, p)) in phi.iter().enumerate() {
            if mask & (1 << i) == 0 {
                value += p.clone();
            }
        }
        for (b, p) in theta {
            let hit = phi
                .iter()
                .enumerate()
                .any(|(i, (a, _))| mask & (1 << i) != 0 && related(*a, *b));
            if hit {
                value += p.clone();
            }
        }
        if best.as_ref().is_none_or(|v| value < *v) {
            best = Some(value);
        }
    }
    best.expect("at least the empty subset")
}

/// Composite Simpson integral of the `N(mean, d²)` density over `[lo, hi]`.
pub fn simpson_normal_mass(mean: f64, d: f64, lo: f64, hi: f64, panels: usize) -> f64 {
    let pdf = |x: f64| {
        let z = (x - mean) / d;
        (-0.5 * z * z).exp() / (d * (2.0 * std::f64::consts::PI).sqrt())
    };
    let panels = panels + panels % 2;
    let h = (hi - lo) / panels as f64;
    let mut sum = pdf(lo) + pdf(hi);
    for k in 1..panels {
        let w = if k % 2 == 1 { 4.0 } else { 2.0 };
        sum += w * pdf(lo + k as f64 * h);
    }
    sum * h / 3.0
}
