//! ε-approximate initial-state and current-state estimators.
//!
//! An estimator is the product of the base model with a deterministic
//! observer that tracks what an intruder with output precision ε can infer.
//! Only the part reachable from the initial product states is built, by a
//! breadth-first exploration. Every product transition carries the
//! probability of the base transition it shadows.

use std::collections::{HashMap, VecDeque};
use std::fmt::Debug;
use std::hash::Hash;

use crate::error::{Error, Result};
use crate::gmdp::FiniteGmdp;
use crate::scalar::{approx_le, inf_norm_distance, Scalar};

/// Which secret the estimator tracks.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum EstimatorKind {
    Initial,
    Current,
}

impl EstimatorKind {
    pub fn as_str(self) -> &'static str {
        match self {
            EstimatorKind::Initial => "initial",
            EstimatorKind::Current => "current",
        }
    }
}

impl std::str::FromStr for EstimatorKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "initial" | "initial-state" => Ok(EstimatorKind::Initial),
            "current" | "current-state" => Ok(EstimatorKind::Current),
            other => Err(Error::InvalidParameter(format!(
                "unknown estimator kind `{other}`"
            ))),
        }
    }
}

/// Product state: real base state `x` and observer component `q`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ProductState<Q> {
    pub x: usize,
    pub q: Q,
}

/// Sorted set of `(candidate initial state, compatible current state)` pairs.
pub type PairSet = Vec<(usize, usize)>;

/// Current-state estimate together with the absorbing reveal flag.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct CurrentEstimate {
    pub states: Vec<usize>,
    pub revealed: bool,
}

pub type InitialEstimatorState = ProductState<PairSet>;
pub type CurrentEstimatorState = ProductState<CurrentEstimate>;

/// Deterministic observer driven by the real successor state.
pub trait Observer {
    type Component: Clone + Eq + Hash + Ord + Debug + Send + Sync;

    fn initial(&self, x0: usize) -> Self::Component;

    /// Observer update when the real system moves to `x_next`.
    fn step(&self, q: &Self::Component, x_next: usize) -> Self::Component;

    fn is_bad(&self, q: &Self::Component) -> bool;

    fn label(&self, names: &[String], x: usize, q: &Self::Component) -> String;
}

/// Shared per-model tables: ε-ball membership and one-step successors under
/// any input.
struct ObserverTables {
    in_ball: Vec<Vec<bool>>,
    post_any: Vec<Vec<usize>>,
    initial: Vec<usize>,
    secret: Vec<bool>,
}

impl ObserverTables {
    fn new<S: Scalar>(model: &FiniteGmdp<S>, eps: &S) -> Self {
        Self {
            in_ball: model.ball_table(eps),
            post_any: (0..model.num_states()).map(|x| model.post_any(x)).collect(),
            initial: model.initial_states().to_vec(),
            secret: (0..model.num_states())
                .map(|x| model.is_secret(x))
                .collect(),
        }
    }
}

/// Observer of the initial-state estimator.
pub struct InitialStateObserver {
    tables: ObserverTables,
}

impl InitialStateObserver {
    pub fn new<S: Scalar>(model: &FiniteGmdp<S>, eps: &S) -> Self {
        Self {
            tables: ObserverTables::new(model, eps),
        }
    }

    /// Candidate initial states carried by `q`.
    pub fn estimate(q: &PairSet) -> Vec<usize> {
        let mut out: Vec<usize> = q.iter().map(|(a, _)| *a).collect();
        out.dedup();
        out
    }
}

impl Observer for InitialStateObserver {
    type Component = PairSet;

    fn initial(&self, x0: usize) -> PairSet {
        let t = &self.tables;
        t.initial
            .iter()
            .filter(|&&x| t.in_ball[x0][x])
            .map(|&x| (x, x))
            .collect::<Vec<_>>()
            .sorted()
    }

    fn step(&self, q: &PairSet, x_next: usize) -> PairSet {
        let t = &self.tables;
        let mut out = Vec::new();
        for &(origin, current) in q {
            for &next in &t.post_any[current] {
                if t.in_ball[x_next][next] {
                    out.push((origin, next));
                }
            }
        }
        out.sorted()
    }

    fn is_bad(&self, q: &PairSet) -> bool {
        q.iter().all(|(origin, _)| self.tables.secret[*origin])
    }

    fn label(&self, names: &[String], x: usize, q: &PairSet) -> String {
        let body: Vec<String> = q
            .iter()
            .map(|(a, b)| format!("({},{})", names[*a], names[*b]))
            .collect();
        format!("{}|{{{}}}", names[x], body.join(","))
    }
}

/// Observer of the current-state estimator.
pub struct CurrentStateObserver {
    tables: ObserverTables,
}

impl CurrentStateObserver {
    pub fn new<S: Scalar>(model: &FiniteGmdp<S>, eps: &S) -> Self {
        Self {
            tables: ObserverTables::new(model, eps),
        }
    }
}

impl Observer for CurrentStateObserver {
    type Component = CurrentEstimate;

    fn initial(&self, x0: usize) -> CurrentEstimate {
        let t = &self.tables;
        let states = t
            .initial
            .iter()
            .copied()
            .filter(|&x| t.in_ball[x0][x])
            .collect::<Vec<_>>()
            .sorted();
        // The flag starts at 0 even when the time-0 estimate is all secret.
        CurrentEstimate {
            states,
            revealed: false,
        }
    }

    fn step(&self, q: &CurrentEstimate, x_next: usize) -> CurrentEstimate {
        let t = &self.tables;
        let mut states = Vec::new();
        for &current in &q.states {
            for &next in &t.post_any[current] {
                if t.in_ball[x_next][next] {
                    states.push(next);
                }
            }
        }
        let states = states.sorted();
        let all_secret = states.iter().all(|&x| t.secret[x]);
        CurrentEstimate {
            revealed: q.revealed || all_secret,
            states,
        }
    }

    fn is_bad(&self, q: &CurrentEstimate) -> bool {
        q.revealed
    }

    fn label(&self, names: &[String], x: usize, q: &CurrentEstimate) -> String {
        let body: Vec<&str> = q.states.iter().map(|&s| names[s].as_str()).collect();
        format!(
            "{}|{{{}}}|{}",
            names[x],
            body.join(","),
            u8::from(q.revealed)
        )
    }
}

trait Sorted {
    fn sorted(self) -> Self;
}

impl<T: Ord> Sorted for Vec<T> {
    fn sorted(mut self) -> Self {
        self.sort_unstable();
        self.dedup();
        self
    }
}

/// Reachable product gMDP with its bad set.
#[derive(Debug, Clone)]
pub struct EstimatorGmdp<S, Q> {
    kind: EstimatorKind,
    states: Vec<ProductState<Q>>,
    labels: Vec<String>,
    index: HashMap<ProductState<Q>, usize>,
    inputs: Vec<String>,
    /// `kernel[s][u]`: one entry per base successor, sorted by base index.
    kernel: Vec<Vec<Vec<(usize, S)>>>,
    bad: Vec<bool>,
    /// `(base initial state, estimator initial state)` in X₀ order.
    initial: Vec<(usize, usize)>,
    base_names: Vec<String>,
    initial_assumption_holds: bool,
}

pub type InitialEstimator<S> = EstimatorGmdp<S, PairSet>;
pub type CurrentEstimator<S> = EstimatorGmdp<S, CurrentEstimate>;

impl<S: Scalar, Q: Clone + Eq + Hash + Ord + Debug> EstimatorGmdp<S, Q> {
    /// Breadth-first product construction from the base initial states.
    pub fn build<O>(model: &FiniteGmdp<S>, observer: &O, kind: EstimatorKind, eps: &S) -> Self
    where
        O: Observer<Component = Q>,
    {
        let names = model.state_names();
        let mut est = EstimatorGmdp {
            kind,
            states: Vec::new(),
            labels: Vec::new(),
            index: HashMap::new(),
            inputs: model.input_names().to_vec(),
            kernel: Vec::new(),
            bad: Vec::new(),
            initial: Vec::new(),
            base_names: names.to_vec(),
            initial_assumption_holds: model.check_initial_assumption(eps),
        };
        let mut frontier = VecDeque::new();
        for &x0 in model.initial_states() {
            let state = ProductState {
                x: x0,
                q: observer.initial(x0),
            };
            let id = est.intern(state, observer, &mut frontier);
            est.initial.push((x0, id));
        }
        while let Some(s) = frontier.pop_front() {
            let x = est.states[s].x;
            let q = est.states[s].q.clone();
            let mut rows = Vec::with_capacity(model.num_inputs());
            for u in 0..model.num_inputs() {
                let mut row = Vec::with_capacity(model.row(x, u).len());
                for (x_next, p) in model.row(x, u) {
                    let q_next = observer.step(&q, *x_next);
                    let id = est.intern(
                        ProductState {
                            x: *x_next,
                            q: q_next,
                        },
                        observer,
                        &mut frontier,
                    );
                    row.push((id, p.clone()));
                }
                rows.push(row);
            }
            est.kernel[s] = rows;
        }
        est
    }

    fn intern<O>(
        &mut self,
        state: ProductState<Q>,
        observer: &O,
        frontier: &mut VecDeque<usize>,
    ) -> usize
    where
        O: Observer<Component = Q>,
    {
        if let Some(&id) = self.index.get(&state) {
            return id;
        }
        let id = self.states.len();
        self.labels
            .push(observer.label(&self.base_names, state.x, &state.q));
        self.bad.push(observer.is_bad(&state.q));
        self.index.insert(state.clone(), id);
        self.states.push(state);
        self.kernel.push(Vec::new());
        frontier.push_back(id);
        id
    }

    pub fn kind(&self) -> EstimatorKind {
        self.kind
    }

    pub fn num_states(&self) -> usize {
        self.states.len()
    }

    pub fn num_inputs(&self) -> usize {
        self.inputs.len()
    }

    pub fn input_name(&self, u: usize) -> &str {
        &self.inputs[u]
    }

    pub fn input_names(&self) -> &[String] {
        &self.inputs
    }

    pub fn input_id(&self, name: &str) -> Result<usize> {
        self.inputs
            .iter()
            .position(|u| u == name)
            .ok_or_else(|| Error::UnknownInput(name.to_string()))
    }

    pub fn state(&self, s: usize) -> &ProductState<Q> {
        &self.states[s]
    }

    pub fn label(&self, s: usize) -> &str {
        &self.labels[s]
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn find(&self, state: &ProductState<Q>) -> Option<usize> {
        self.index.get(state).copied()
    }

    pub fn find_label(&self, label: &str) -> Option<usize> {
        self.labels.iter().position(|l| l == label)
    }

    pub fn row(&self, s: usize, u: usize) -> &[(usize, S)] {
        &self.kernel[s][u]
    }

    pub fn is_bad(&self, s: usize) -> bool {
        self.bad[s]
    }

    pub fn bad_states(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.num_states()).filter(|&s| self.bad[s])
    }

    /// `(base x₀, estimator state)` pairs in X₀ order.
    pub fn initial_states(&self) -> &[(usize, usize)] {
        &self.initial
    }

    /// Estimator initial state whose base component is `x0`.
    pub fn initial_for(&self, x0: usize) -> Option<usize> {
        self.initial.iter().find(|(b, _)| *b == x0).map(|(_, s)| *s)
    }

    pub fn base_state_names(&self) -> &[String] {
        &self.base_names
    }

    pub fn base_state_id(&self, name: &str) -> Result<usize> {
        self.base_names
            .iter()
            .position(|n| n == name)
            .ok_or_else(|| Error::UnknownState(name.to_string()))
    }

    /// Successor reached from `s` under `u` when the base system moves to `x_next`.
    pub fn successor(&self, s: usize, u: usize, x_next: usize) -> Option<usize> {
        self.kernel[s][u]
            .iter()
            .map(|(t, _)| *t)
            .find(|&t| self.states[t].x == x_next)
    }

    /// False when some initial state's ε-ball within X₀ lies inside X_S; the
    /// resulting verdicts are then trivially violated.
    pub fn initial_assumption_holds(&self) -> bool {
        self.initial_assumption_holds
    }
}

fn check_eps<S: Scalar>(eps: &S) -> Result<()> {
    if *eps < S::zero() {
        return Err(Error::InvalidParameter(format!(
            "eps must be >= 0, got {}",
            eps.to_literal()
        )));
    }
    Ok(())
}

pub fn build_initial_estimator<S: Scalar>(
    model: &FiniteGmdp<S>,
    eps: &S,
) -> Result<InitialEstimator<S>> {
    check_eps(eps)?;
    let observer = InitialStateObserver::new(model, eps);
    Ok(EstimatorGmdp::build(
        model,
        &observer,
        EstimatorKind::Initial,
        eps,
    ))
}

pub fn build_current_estimator<S: Scalar>(
    model: &FiniteGmdp<S>,
    eps: &S,
) -> Result<CurrentEstimator<S>> {
    check_eps(eps)?;
    let observer = CurrentStateObserver::new(model, eps);
    Ok(EstimatorGmdp::build(
        model,
        &observer,
        EstimatorKind::Current,
        eps,
    ))
}

/// Initial states from which some trajectory produces outputs within `eps`
/// (per step, infinity norm) of `outputs`.
pub fn initial_state_estimate<S: Scalar>(
    model: &FiniteGmdp<S>,
    eps: &S,
    outputs: &[Vec<S>],
) -> Result<Vec<usize>> {
    check_eps(eps)?;
    let Some((first, rest)) = outputs.split_first() else {
        return Err(Error::InvalidParameter("output sequence is empty".into()));
    };
    for y in outputs {
        if y.len() != model.output_dim() {
            return Err(Error::OutputDimensionMismatch {
                left: model.output_dim(),
                right: y.len(),
            });
        }
    }
    let close = |x: usize, y: &[S]| approx_le(&inf_norm_distance(model.output(x), y), eps);
    let mut pairs: PairSet = model
        .initial_states()
        .iter()
        .copied()
        .filter(|&x| close(x, first))
        .map(|x| (x, x))
        .collect::<Vec<_>>()
        .sorted();
    for y in rest {
        let mut next = Vec::new();
        for &(origin, current) in &pairs {
            for succ in model.post_any(current) {
                if close(succ, y) {
                    next.push((origin, succ));
                }
            }
        }
        pairs = next.sorted();
    }
    Ok(InitialStateObserver::estimate(&pairs))
}

/// States compatible with `outputs` at the last step, from any initial state.
pub fn current_state_estimate<S: Scalar>(
    model: &FiniteGmdp<S>,
    eps: &S,
    outputs: &[Vec<S>],
) -> Result<Vec<usize>> {
    check_eps(eps)?;
    let Some((first, rest)) = outputs.split_first() else {
        return Err(Error::InvalidParameter("output sequence is empty".into()));
    };
    for y in outputs {
        if y.len() != model.output_dim() {
            return Err(Error::OutputDimensionMismatch {
                left: model.output_dim(),
                right: y.len(),
            });
        }
    }
    let close = |x: usize, y: &[S]| approx_le(&inf_norm_distance(model.output(x), y), eps);
    let mut set: Vec<usize> = model
        .initial_states()
        .iter()
        .copied()
        .filter(|&x| close(x, first))
        .collect::<Vec<_>>()
        .sorted();
    for y in rest {
        let mut next = Vec::new();
        for &current in &set {
            next.extend(
                model
                    .post_any(current)
                    .into_iter()
                    .filter(|&succ| close(succ, y)),
            );
        }
        set = next.sorted();
    }
    Ok(set)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;
    use num_rational::BigRational;

    fn labels_of<S: Scalar, Q>(
        est: &EstimatorGmdp<S, Q>,
        ids: impl Iterator<Item = usize>,
    ) -> Vec<String>
    where
        Q: Clone + Eq + Hash + Ord + Debug,
    {
        let mut out: Vec<String> = ids.map(|s| est.label(s).to_string()).collect();
        out.sort();
        out
    }

    #[test]
    fn five_state_initial_estimator_matches_worked_example() {
        let m = fixtures::five_state::<f64>();
        let est = build_initial_estimator(&m, &0.0).unwrap();
        assert_eq!(est.num_states(), 9);
        let order: Vec<&str> = est.labels().iter().map(String::as_str).collect();
        assert_eq!(
            order,
            [
                "A|{(A,A),(B,B)}",
                "B|{(A,A),(B,B)}",
                "A|{(A,A)}",
                "C|{(A,C),(B,C)}",
                "D|{(B,D)}",
                "C|{(A,C)}",
                "E|{(A,E),(B,E)}",
                "E|{(B,E)}",
                "E|{(A,E)}",
            ]
        );
        let initial: Vec<&str> = est
            .initial_states()
            .iter()
            .map(|(_, s)| est.label(*s))
            .collect();
        assert_eq!(initial, ["A|{(A,A),(B,B)}", "B|{(A,A),(B,B)}"]);
        let bad: Vec<bool> = (0..9).map(|s| est.is_bad(s)).collect();
        // Indicator vector of the bad set in the construction order above.
        let expected = [0, 0, 1, 0, 0, 1, 0, 0, 1];
        assert_eq!(bad, expected.map(|b| b == 1));
    }

    #[test]
    fn transitions_copy_base_probabilities() {
        let m = fixtures::five_state::<BigRational>();
        let est = build_initial_estimator(&m, &BigRational::from_integer(0.into())).unwrap();
        for s in 0..est.num_states() {
            let x = est.state(s).x;
            for u in 0..est.num_inputs() {
                let row = est.row(s, u);
                assert_eq!(row.len(), m.row(x, u).len());
                for ((t, p), (xb, pb)) in row.iter().zip(m.row(x, u)) {
                    assert_eq!(est.state(*t).x, *xb);
                    assert_eq!(p, pb);
                }
            }
        }
    }

    #[test]
    fn empty_secret_means_no_bad_states() {
        let m = fixtures::five_state_no_secret::<f64>();
        for eps in [0.0, 0.05, 0.2] {
            assert_eq!(
                build_initial_estimator(&m, &eps)
                    .unwrap()
                    .bad_states()
                    .count(),
                0
            );
            let cur = build_current_estimator(&m, &eps).unwrap();
            assert_eq!(cur.bad_states().count(), 0);
            assert!((0..cur.num_states()).all(|s| !cur.state(s).q.revealed));
        }
    }

    #[test]
    fn current_estimator_reveals_on_d() {
        let m = fixtures::five_state::<f64>();
        let est = build_current_estimator(&m, &0.0).unwrap();
        let b = m.state_id("B").unwrap();
        let d = m.state_id("D").unwrap();
        let s0 = est.initial_for(b).unwrap();
        assert_eq!(est.label(s0), "B|{A,B}|0");
        let sd = est.successor(s0, 0, d).unwrap();
        assert_eq!(est.label(sd), "D|{D}|1");
        assert!(est.is_bad(sd));
    }

    #[test]
    fn single_secret_state_reveals_after_one_step() {
        let m = fixtures::single_secret_state::<f64>();
        let est = build_current_estimator(&m, &0.0).unwrap();
        let (_, s0) = est.initial_states()[0];
        assert!(!est.is_bad(s0));
        let row = est.row(s0, 0);
        assert_eq!(row.len(), 1);
        assert!(est.is_bad(row[0].0));
        assert_eq!(row[0].1, 1.0);
        assert!(!est.initial_assumption_holds());
    }

    #[test]
    fn flag_is_absorbing() {
        let m = fixtures::five_state::<f64>();
        for eps in [0.0, 0.05, 0.1] {
            let est = build_current_estimator(&m, &eps).unwrap();
            for s in est.bad_states() {
                for u in 0..est.num_inputs() {
                    assert!(est.row(s, u).iter().all(|(t, _)| est.is_bad(*t)));
                }
            }
        }
    }

    #[test]
    fn initial_state_estimate_examples() {
        let m = fixtures::five_state::<f64>();
        let name = |v: Vec<usize>| {
            v.into_iter()
                .map(|x| m.state_name(x).to_string())
                .collect::<Vec<_>>()
        };
        let seq = |ys: &[f64]| ys.iter().map(|y| vec![*y]).collect::<Vec<_>>();
        assert_eq!(
            name(initial_state_estimate(&m, &0.0, &seq(&[0.1, 0.1, 0.1, 0.25])).unwrap()),
            ["A"]
        );
        assert_eq!(
            name(initial_state_estimate(&m, &0.0, &seq(&[0.1])).unwrap()),
            ["A", "B"]
        );
        assert_eq!(
            name(initial_state_estimate(&m, &0.0, &seq(&[0.1, 0.25, 0.3])).unwrap()),
            ["A", "B"]
        );
        assert!(initial_state_estimate(&m, &0.0, &seq(&[0.7]))
            .unwrap()
            .is_empty());
        assert!(initial_state_estimate(&m, &0.0, &[]).is_err());
    }

    #[test]
    fn bad_set_labels_at_eps_zero() {
        let m = fixtures::five_state::<f64>();
        let est = build_initial_estimator(&m, &0.0).unwrap();
        assert_eq!(
            labels_of(&est, est.bad_states()),
            ["A|{(A,A)}", "C|{(A,C)}", "E|{(A,E)}"]
        );
    }

    #[test]
    fn negative_eps_is_rejected() {
        let m = fixtures::five_state::<f64>();
        assert!(build_initial_estimator(&m, &-0.1).is_err());
    }
}
