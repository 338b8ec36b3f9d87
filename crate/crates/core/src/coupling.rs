//! Maximum mass a coupling of two finite distributions can place on a relation.
//!
//! The value is the maximum flow of the bipartite network
//! `source -> a` (capacity `phi(a)`), `a -> b` for related pairs (capacity 1),
//! `b -> sink` (capacity `theta(b)`), solved with Edmonds-Karp.

use std::collections::VecDeque;

use crate::error::{Error, Result};
use crate::scalar::{min_of, Scalar};

/// Sparse distribution: `(state index, probability)`.
pub type Distribution<S> = [(usize, S)];

/// Dense residual network for small max-flow instances.
#[derive(Debug, Clone)]
pub struct FlowNetwork<S> {
    residual: Vec<Vec<S>>,
}

impl<S: Scalar> FlowNetwork<S> {
    pub fn new(nodes: usize) -> Self {
        Self {
            residual: vec![vec![S::zero(); nodes]; nodes],
        }
    }

    pub fn add_capacity(&mut self, from: usize, to: usize, cap: S) {
        self.residual[from][to] = self.residual[from][to].clone() + cap;
    }

    /// Shortest augmenting paths until none is left. Residuals at or below
    /// the scalar's edge floor count as saturated, so float instances stop.
    pub fn max_flow(&mut self, source: usize, sink: usize) -> S {
        let n = self.residual.len();
        let floor = S::edge_floor();
        let mut total = S::zero();
        loop {
            let mut parent = vec![usize::MAX; n];
            parent[source] = source;
            let mut queue = VecDeque::from([source]);
            while let Some(v) = queue.pop_front() {
                if v == sink {
                    break;
                }
                for (w, r) in self.residual[v].iter().enumerate() {
                    if parent[w] == usize::MAX && *r > floor {
                        parent[w] = v;
                        queue.push_back(w);
                    }
                }
            }
            if parent[sink] == usize::MAX {
                return total;
            }
            let mut bottleneck: Option<S> = None;
            let mut w = sink;
            while w != source {
                let v = parent[w];
                let r = self.residual[v][w].clone();
                bottleneck = Some(match bottleneck {
                    Some(b) => min_of(b, r),
                    None => r,
                });
                w = v;
            }
            let b = bottleneck.expect("path has an edge");
            let mut w = sink;
            while w != source {
                let v = parent[w];
                self.residual[v][w] = self.residual[v][w].clone() - b.clone();
                self.residual[w][v] = self.residual[w][v].clone() + b.clone();
                w = v;
            }
            total = total + b;
        }
    }
}

fn check_normalized<S: Scalar>(d: &Distribution<S>) -> Result<()> {
    let sum = d.iter().fold(S::zero(), |a, (_, p)| a + p.clone());
    if (sum.clone() - S::one()).abs() > S::row_sum_tolerance() {
        return Err(Error::NotNormalized {
            sum: sum.to_literal(),
        });
    }
    Ok(())
}

/// Max-flow value without a normalization check; sub-probability inputs are
/// allowed.
pub fn coupling_flow<S, F>(phi: &Distribution<S>, theta: &Distribution<S>, related: F) -> S
where
    S: Scalar,
    F: Fn(usize, usize) -> bool,
{
    let phi: Vec<&(usize, S)> = phi.iter().filter(|(_, p)| *p > S::zero()).collect();
    let theta: Vec<&(usize, S)> = theta.iter().filter(|(_, p)| *p > S::zero()).collect();
    let source = 0;
    let sink = 1 + phi.len() + theta.len();
    let mut net = FlowNetwork::new(sink + 1);
    for (i, (a, pa)) in phi.iter().enumerate() {
        net.add_capacity(source, 1 + i, pa.clone());
        for (j, (b, _)) in theta.iter().enumerate() {
            if related(*a, *b) {
                net.add_capacity(1 + i, 1 + phi.len() + j, S::one());
            }
        }
    }
    for (j, (_, pb)) in theta.iter().enumerate() {
        net.add_capacity(1 + phi.len() + j, sink, pb.clone());
    }
    net.max_flow(source, sink)
}

/// Largest probability any coupling of `phi` and `theta` assigns to pairs
/// accepted by `related`.
pub fn max_coupling_mass<S, F>(
    phi: &Distribution<S>,
    theta: &Distribution<S>,
    related: F,
) -> Result<S>
where
    S: Scalar,
    F: Fn(usize, usize) -> bool,
{
    check_normalized(phi)?;
    check_normalized(theta)?;
    Ok(coupling_flow(phi, theta, related))
}

/// True when a δ-lifting of the relation exists.
pub fn lifting_exists<S, F>(
    phi: &Distribution<S>,
    theta: &Distribution<S>,
    related: F,
    delta: &S,
) -> Result<bool>
where
    S: Scalar,
    F: Fn(usize, usize) -> bool,
{
    let mass = max_coupling_mass(phi, theta, related)?;
    Ok(crate::scalar::approx_ge(&mass, &(S::one() - delta.clone())))
}
