//! Finite general Markov decision processes with secret states and a
//! vector-valued output map.
//!
//! Models are assembled as a [`GmdpDocument`] (identifier based, possibly
//! malformed) and turned into an immutable [`FiniteGmdp`] (dense indices,
//! validated) by [`GmdpDocument::into_model`]. Dense indices follow
//! declaration order.

use std::collections::{HashMap, HashSet};
use std::fmt;

use crate::error::{Error, Result};
use crate::scalar::{approx_le, inf_norm_distance, is_positive, Scalar};

/// One `(from, input) -> to` transition with probability `p`.
#[derive(Debug, Clone, PartialEq)]
pub struct KernelEntry<S> {
    pub from: String,
    pub input: String,
    pub to: String,
    pub p: S,
}

/// Identifier-level description of a finite gMDP, as read from a file.
#[derive(Debug, Clone, PartialEq)]
pub struct GmdpDocument<S> {
    pub states: Vec<String>,
    pub inputs: Vec<String>,
    pub initial: Vec<String>,
    pub secret: Vec<String>,
    pub output_dim: usize,
    pub outputs: Vec<(String, Vec<S>)>,
    pub kernel: Vec<KernelEntry<S>>,
}

impl<S: Scalar> GmdpDocument<S> {
    pub fn new<I, J, T, V>(states: I, inputs: J) -> Self
    where
        I: IntoIterator<Item = T>,
        J: IntoIterator<Item = V>,
        T: Into<String>,
        V: Into<String>,
    {
        Self {
            states: states.into_iter().map(Into::into).collect(),
            inputs: inputs.into_iter().map(Into::into).collect(),
            initial: Vec::new(),
            secret: Vec::new(),
            output_dim: 1,
            outputs: Vec::new(),
            kernel: Vec::new(),
        }
    }

    pub fn with_initial<I: IntoIterator<Item = T>, T: Into<String>>(mut self, ids: I) -> Self {
        self.initial = ids.into_iter().map(Into::into).collect();
        self
    }

    pub fn with_secret<I: IntoIterator<Item = T>, T: Into<String>>(mut self, ids: I) -> Self {
        self.secret = ids.into_iter().map(Into::into).collect();
        self
    }

    pub fn output(mut self, state: &str, value: Vec<S>) -> Self {
        self.output_dim = value.len();
        self.outputs.push((state.to_string(), value));
        self
    }

    pub fn transition(mut self, from: &str, input: &str, to: &str, p: S) -> Self {
        self.kernel.push(KernelEntry {
            from: from.to_string(),
            input: input.to_string(),
            to: to.to_string(),
            p,
        });
        self
    }

    /// Lists every violated well-formedness invariant.
    pub fn validate(&self) -> ValidationReport {
        let mut violations = Vec::new();
        let mut state_set = HashSet::new();
        for s in &self.states {
            if !state_set.insert(s.as_str()) {
                violations.push(Violation::DuplicateState(s.clone()));
            }
        }
        if self.states.is_empty() {
            violations.push(Violation::NoStates);
        }
        let mut input_set = HashSet::new();
        for u in &self.inputs {
            if !input_set.insert(u.as_str()) {
                violations.push(Violation::DuplicateInput(u.clone()));
            }
        }
        if self.inputs.is_empty() {
            violations.push(Violation::NoInputs);
        }
        for (role, ids) in [
            (SetRole::Initial, &self.initial),
            (SetRole::Secret, &self.secret),
        ] {
            for id in ids {
                if !state_set.contains(id.as_str()) {
                    violations.push(Violation::NotASubset {
                        role,
                        id: id.clone(),
                    });
                }
            }
        }
        if self.output_dim == 0 {
            violations.push(Violation::ZeroOutputDim);
        }
        let mut seen_outputs = HashSet::new();
        for (id, value) in &self.outputs {
            if !state_set.contains(id.as_str()) {
                violations.push(Violation::UnknownOutputState(id.clone()));
            } else if !seen_outputs.insert(id.as_str()) {
                violations.push(Violation::DuplicateOutput(id.clone()));
            }
            if value.len() != self.output_dim {
                violations.push(Violation::OutputDimension {
                    state: id.clone(),
                    len: value.len(),
                    expected: self.output_dim,
                });
            }
        }
        for s in &self.states {
            if !seen_outputs.contains(s.as_str()) {
                violations.push(Violation::MissingOutput(s.clone()));
            }
        }

        let mut sums: HashMap<(&str, &str), S> = HashMap::new();
        let mut seen_edges = HashSet::new();
        for e in &self.kernel {
            let mut ok = true;
            for id in [&e.from, &e.to] {
                if !state_set.contains(id.as_str()) {
                    violations.push(Violation::UnknownKernelState(id.clone()));
                    ok = false;
                }
            }
            if !input_set.contains(e.input.as_str()) {
                violations.push(Violation::UnknownKernelInput(e.input.clone()));
                ok = false;
            }
            if e.p < S::zero() {
                violations.push(Violation::NegativeProbability {
                    from: e.from.clone(),
                    input: e.input.clone(),
                    to: e.to.clone(),
                    p: e.p.to_literal(),
                });
            } else if e.p > S::one() {
                violations.push(Violation::ProbabilityAboveOne {
                    from: e.from.clone(),
                    input: e.input.clone(),
                    to: e.to.clone(),
                    p: e.p.to_literal(),
                });
            }
            if !seen_edges.insert((e.from.as_str(), e.input.as_str(), e.to.as_str())) {
                violations.push(Violation::DuplicateTransition {
                    from: e.from.clone(),
                    input: e.input.clone(),
                    to: e.to.clone(),
                });
            }
            if ok {
                let slot = sums
                    .entry((e.from.as_str(), e.input.as_str()))
                    .or_insert_with(S::zero);
                *slot = slot.clone() + e.p.clone();
            }
        }
        if violations.iter().all(|v| !v.is_structural()) {
            for x in &self.states {
                for u in &self.inputs {
                    let sum = sums
                        .get(&(x.as_str(), u.as_str()))
                        .cloned()
                        .unwrap_or_else(S::zero);
                    if (sum.clone() - S::one()).abs() > S::row_sum_tolerance() {
                        violations.push(Violation::RowSum {
                            from: x.clone(),
                            input: u.clone(),
                            sum: sum.to_literal(),
                        });
                    }
                }
            }
        }
        ValidationReport { violations }
    }

    /// Validates and converts to the dense representation.
    pub fn into_model(self) -> Result<FiniteGmdp<S>> {
        let report = self.validate();
        if !report.is_valid() {
            return Err(Error::InvalidModel(report));
        }
        let state_index: HashMap<String, usize> = self
            .states
            .iter()
            .enumerate()
            .map(|(i, s)| (s.clone(), i))
            .collect();
        let input_index: HashMap<String, usize> = self
            .inputs
            .iter()
            .enumerate()
            .map(|(i, s)| (s.clone(), i))
            .collect();
        let n = self.states.len();
        let mut initial_flags = vec![false; n];
        let mut initial = Vec::new();
        for id in &self.initial {
            let i = state_index[id];
            if !initial_flags[i] {
                initial_flags[i] = true;
                initial.push(i);
            }
        }
        let mut secret = vec![false; n];
        for id in &self.secret {
            secret[state_index[id]] = true;
        }
        let mut outputs = vec![Vec::new(); n];
        for (id, value) in self.outputs {
            outputs[state_index[&id]] = value;
        }
        let mut kernel = vec![vec![Vec::new(); self.inputs.len()]; n];
        for e in self.kernel {
            if is_positive(&e.p) {
                kernel[state_index[&e.from]][input_index[&e.input]].push((state_index[&e.to], e.p));
            }
        }
        for row in kernel.iter_mut().flatten() {
            row.sort_by_key(|(to, _)| *to);
        }
        Ok(FiniteGmdp {
            states: self.states,
            state_index,
            inputs: self.inputs,
            input_index,
            initial,
            initial_flags,
            secret,
            output_dim: self.output_dim,
            outputs,
            kernel,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SetRole {
    Initial,
    Secret,
}

impl fmt::Display for SetRole {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SetRole::Initial => "initial",
            SetRole::Secret => "secret",
        })
    }
}

/// One violated invariant. Probabilities are carried as literals so the
/// report is independent of the scalar type.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Violation {
    NoStates,
    NoInputs,
    DuplicateState(String),
    DuplicateInput(String),
    NotASubset {
        role: SetRole,
        id: String,
    },
    ZeroOutputDim,
    UnknownOutputState(String),
    DuplicateOutput(String),
    MissingOutput(String),
    OutputDimension {
        state: String,
        len: usize,
        expected: usize,
    },
    UnknownKernelState(String),
    UnknownKernelInput(String),
    DuplicateTransition {
        from: String,
        input: String,
        to: String,
    },
    NegativeProbability {
        from: String,
        input: String,
        to: String,
        p: String,
    },
    ProbabilityAboveOne {
        from: String,
        input: String,
        to: String,
        p: String,
    },
    RowSum {
        from: String,
        input: String,
        sum: String,
    },
}

impl Violation {
    /// Identifier-level problems that make row sums meaningless.
    fn is_structural(&self) -> bool {
        matches!(
            self,
            Violation::NoStates
                | Violation::NoInputs
                | Violation::DuplicateState(_)
                | Violation::DuplicateInput(_)
                | Violation::UnknownKernelState(_)
                | Violation::UnknownKernelInput(_)
        )
    }
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::NoStates => write!(f, "state set is empty"),
            Violation::NoInputs => write!(f, "input set is empty"),
            Violation::DuplicateState(s) => write!(f, "duplicate state `{s}`"),
            Violation::DuplicateInput(u) => write!(f, "duplicate input `{u}`"),
            Violation::NotASubset { role, id } => {
                write!(f, "{role} state `{id}` is not a declared state")
            }
            Violation::ZeroOutputDim => write!(f, "output_dim must be positive"),
            Violation::UnknownOutputState(s) => write!(f, "output given for unknown state `{s}`"),
            Violation::DuplicateOutput(s) => write!(f, "output for `{s}` given twice"),
            Violation::MissingOutput(s) => write!(f, "state `{s}` has no output"),
            Violation::OutputDimension {
                state,
                len,
                expected,
            } => {
                write!(
                    f,
                    "output of `{state}` has length {len}, expected {expected}"
                )
            }
            Violation::UnknownKernelState(s) => write!(f, "kernel references unknown state `{s}`"),
            Violation::UnknownKernelInput(u) => write!(f, "kernel references unknown input `{u}`"),
            Violation::DuplicateTransition { from, input, to } => {
                write!(f, "transition ({from}, {input}) -> {to} given twice")
            }
            Violation::NegativeProbability { from, input, to, p } => {
                write!(f, "negative probability {p} on ({from}, {input}) -> {to}")
            }
            Violation::ProbabilityAboveOne { from, input, to, p } => {
                write!(f, "probability {p} > 1 on ({from}, {input}) -> {to}")
            }
            Violation::RowSum { from, input, sum } => {
                write!(f, "row ({from}, {input}) sums to {sum}, not 1")
            }
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.violations.is_empty()
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.violations.is_empty() {
            return write!(f, "valid");
        }
        for (i, v) in self.violations.iter().enumerate() {
            if i > 0 {
                write!(f, "; ")?;
            }
            write!(f, "{v}")?;
        }
        Ok(())
    }
}

/// Validates a document without consuming it.
pub fn validate<S: Scalar>(doc: &GmdpDocument<S>) -> ValidationReport {
    doc.validate()
}

/// A validated finite gMDP. Immutable; safe to share across threads.
#[derive(Debug, Clone)]
pub struct FiniteGmdp<S> {
    states: Vec<String>,
    state_index: HashMap<String, usize>,
    inputs: Vec<String>,
    input_index: HashMap<String, usize>,
    initial: Vec<usize>,
    initial_flags: Vec<bool>,
    secret: Vec<bool>,
    output_dim: usize,
    outputs: Vec<Vec<S>>,
    /// `kernel[x][u]` is the sparse successor distribution, sorted by target.
    kernel: Vec<Vec<Vec<(usize, S)>>>,
}

impl<S: Scalar> FiniteGmdp<S> {
    pub fn num_states(&self) -> usize {
        self.states.len()
    }

    pub fn num_inputs(&self) -> usize {
        self.inputs.len()
    }

    pub fn state_name(&self, x: usize) -> &str {
        &self.states[x]
    }

    pub fn state_names(&self) -> &[String] {
        &self.states
    }

    pub fn input_name(&self, u: usize) -> &str {
        &self.inputs[u]
    }

    pub fn input_names(&self) -> &[String] {
        &self.inputs
    }

    pub fn state_id(&self, name: &str) -> Result<usize> {
        self.state_index
            .get(name)
            .copied()
            .ok_or_else(|| Error::UnknownState(name.to_string()))
    }

    pub fn input_id(&self, name: &str) -> Result<usize> {
        self.input_index
            .get(name)
            .copied()
            .ok_or_else(|| Error::UnknownInput(name.to_string()))
    }

    /// Initial states in declaration order.
    pub fn initial_states(&self) -> &[usize] {
        &self.initial
    }

    pub fn is_initial(&self, x: usize) -> bool {
        self.initial_flags[x]
    }

    pub fn is_secret(&self, x: usize) -> bool {
        self.secret[x]
    }

    pub fn secret_states(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.num_states()).filter(|&x| self.secret[x])
    }

    pub fn output_dim(&self) -> usize {
        self.output_dim
    }

    pub fn output(&self, x: usize) -> &[S] {
        &self.outputs[x]
    }

    /// Sparse row `T(· | x, u)`, sorted by successor index.
    pub fn row(&self, x: usize, u: usize) -> &[(usize, S)] {
        &self.kernel[x][u]
    }

    pub fn probability(&self, x: usize, u: usize, to: usize) -> S {
        self.kernel[x][u]
            .binary_search_by_key(&to, |(t, _)| *t)
            .map(|i| self.kernel[x][u][i].1.clone())
            .unwrap_or_else(|_| S::zero())
    }

    /// States reachable in one step from `x` under some input, sorted.
    pub fn post_any(&self, x: usize) -> Vec<usize> {
        let mut out: Vec<usize> = self.kernel[x]
            .iter()
            .flat_map(|row| row.iter().map(|(t, _)| *t))
            .collect();
        out.sort_unstable();
        out.dedup();
        out
    }

    /// `‖h(x) - h(y)‖∞`.
    pub fn output_distance(&self, x: usize, y: usize) -> S {
        inf_norm_distance(&self.outputs[x], &self.outputs[y])
    }

    /// Output distance between `x` here and `y` in `other`.
    pub fn output_distance_to(&self, x: usize, other: &FiniteGmdp<S>, y: usize) -> S {
        inf_norm_distance(&self.outputs[x], &other.outputs[y])
    }

    pub fn within_eps(&self, x: usize, y: usize, eps: &S) -> bool {
        approx_le(&self.output_distance(x, y), eps)
    }

    /// `B_ε(x)`: states whose output is within `eps` of `h(x)`, sorted.
    pub fn eps_ball(&self, x: usize, eps: &S) -> Vec<usize> {
        (0..self.num_states())
            .filter(|&y| self.within_eps(x, y, eps))
            .collect()
    }

    pub fn eps_ball_by_name(&self, x: &str, eps: &S) -> Result<Vec<String>> {
        let x = self.state_id(x)?;
        Ok(self
            .eps_ball(x, eps)
            .into_iter()
            .map(|y| self.states[y].clone())
            .collect())
    }

    /// Dense `n × n` membership table of ε-balls.
    pub fn ball_table(&self, eps: &S) -> Vec<Vec<bool>> {
        (0..self.num_states())
            .map(|x| {
                (0..self.num_states())
                    .map(|y| self.within_eps(x, y, eps))
                    .collect()
            })
            .collect()
    }

    /// True iff no initial state has its ε-ball (within X₀) inside X_S.
    pub fn check_initial_assumption(&self, eps: &S) -> bool {
        self.initial.iter().all(|&x0| {
            self.initial
                .iter()
                .any(|&x| self.within_eps(x0, x, eps) && !self.secret[x])
        })
    }

    /// Re-checks the numeric invariants of an already built model.
    pub fn validate(&self) -> ValidationReport {
        self.to_document().validate()
    }

    pub fn to_document(&self) -> GmdpDocument<S> {
        let mut kernel = Vec::new();
        for x in 0..self.num_states() {
            for u in 0..self.num_inputs() {
                for (to, p) in &self.kernel[x][u] {
                    kernel.push(KernelEntry {
                        from: self.states[x].clone(),
                        input: self.inputs[u].clone(),
                        to: self.states[*to].clone(),
                        p: p.clone(),
                    });
                }
            }
        }
        GmdpDocument {
            states: self.states.clone(),
            inputs: self.inputs.clone(),
            initial: self
                .initial
                .iter()
                .map(|&x| self.states[x].clone())
                .collect(),
            secret: self
                .secret_states()
                .map(|x| self.states[x].clone())
                .collect(),
            output_dim: self.output_dim,
            outputs: self
                .states
                .iter()
                .cloned()
                .zip(self.outputs.iter().cloned())
                .collect(),
            kernel,
        }
    }

    /// Copy with a different secret set; used for what-if checks.
    pub fn with_secret(&self, secret: &[usize]) -> Self {
        let mut out = self.clone();
        out.secret = vec![false; self.num_states()];
        for &x in secret {
            out.secret[x] = true;
        }
        out
    }

    /// Same model over another scalar type, converted through literals.
    pub fn convert<T: Scalar>(&self) -> FiniteGmdp<T> {
        FiniteGmdp {
            states: self.states.clone(),
            state_index: self.state_index.clone(),
            inputs: self.inputs.clone(),
            input_index: self.input_index.clone(),
            initial: self.initial.clone(),
            initial_flags: self.initial_flags.clone(),
            secret: self.secret.clone(),
            output_dim: self.output_dim,
            outputs: self
                .outputs
                .iter()
                .map(|o| o.iter().map(crate::scalar::convert).collect())
                .collect(),
            kernel: self
                .kernel
                .iter()
                .map(|rows| {
                    rows.iter()
                        .map(|r| {
                            r.iter()
                                .map(|(t, p)| (*t, crate::scalar::convert(p)))
                                .collect()
                        })
                        .collect()
                })
                .collect(),
        }
    }
}
