//! Opacity-preserving simulation relations between finite gMDPs and the
//! transfer of an abstract verdict to the concrete system.
//!
//! Model A is the concrete side (`x`, `u`), model B the abstraction (`x̂`, `û`).

use std::collections::HashSet;
use std::fmt;

use rayon::prelude::*;

use crate::coupling::coupling_flow;
use crate::error::{Error, Result};
use crate::estimator::EstimatorKind;
use crate::gmdp::FiniteGmdp;
use crate::reachability::OpacityVerdict;
use crate::scalar::{approx_ge, approx_le, Scalar};

/// Set of `(A state, B state)` pairs.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StateRelation {
    pairs: Vec<(usize, usize)>,
    lookup: HashSet<(usize, usize)>,
}

impl StateRelation {
    /// Pairs are deduplicated and kept in first-seen order.
    pub fn new(pairs: impl IntoIterator<Item = (usize, usize)>) -> Self {
        let mut lookup = HashSet::new();
        let pairs = pairs.into_iter().filter(|p| lookup.insert(*p)).collect();
        Self { pairs, lookup }
    }

    pub fn identity(n: usize) -> Self {
        Self::new((0..n).map(|x| (x, x)))
    }

    pub fn from_names<S: Scalar, N: AsRef<str>>(
        a: &FiniteGmdp<S>,
        b: &FiniteGmdp<S>,
        pairs: &[(N, N)],
    ) -> Result<Self> {
        let mut out = Vec::with_capacity(pairs.len());
        for (x, xh) in pairs {
            out.push((a.state_id(x.as_ref())?, b.state_id(xh.as_ref())?));
        }
        Ok(Self::new(out))
    }

    pub fn contains(&self, x: usize, xh: usize) -> bool {
        self.lookup.contains(&(x, xh))
    }

    pub fn pairs(&self) -> &[(usize, usize)] {
        &self.pairs
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    pub fn is_subset(&self, other: &StateRelation) -> bool {
        self.pairs.iter().all(|(a, b)| other.contains(*a, *b))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum RelationKind {
    InitSop,
    CurSop,
}

impl RelationKind {
    pub fn as_str(self) -> &'static str {
        match self {
            RelationKind::InitSop => "InitSOP",
            RelationKind::CurSop => "CurSOP",
        }
    }
}

impl std::str::FromStr for RelationKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "initsop" | "initial" | "init" => Ok(RelationKind::InitSop),
            "cursop" | "current" | "cur" => Ok(RelationKind::CurSop),
            other => Err(Error::InvalidParameter(format!(
                "unknown relation kind `{other}`"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Condition {
    C1a,
    C1b,
    C2,
    C3a,
    C3b,
    C3c,
    C3d,
}

impl Condition {
    pub fn id(self) -> &'static str {
        match self {
            Condition::C1a => "1a",
            Condition::C1b => "1b",
            Condition::C2 => "2",
            Condition::C3a => "3a",
            Condition::C3b => "3b",
            Condition::C3c => "3c",
            Condition::C3d => "3d",
        }
    }
}

impl fmt::Display for Condition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.id())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RelationFailure<S> {
    pub condition: Condition,
    pub state_a: Option<String>,
    pub state_b: Option<String>,
    /// Input on the universally quantified side.
    pub input: Option<String>,
    /// Best coupling mass (or output distance for condition 2).
    pub achieved: Option<S>,
    pub required: Option<S>,
}

impl<S: Scalar> fmt::Display for RelationFailure<S> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "condition {}", self.condition)?;
        match (&self.state_a, &self.state_b) {
            (Some(a), Some(b)) => write!(f, " at ({a}, {b})")?,
            (Some(a), None) => write!(f, " at {a}")?,
            (None, Some(b)) => write!(f, " at {b}")?,
            (None, None) => {}
        }
        if let Some(u) = &self.input {
            write!(f, " input {u}")?;
        }
        if let Some(v) = &self.achieved {
            write!(f, ": achieved {}", v.to_literal())?;
        }
        if let Some(r) = &self.required {
            write!(f, ", required {}", r.to_literal())?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct RelationCheckReport<S> {
    pub kind: RelationKind,
    pub eps: S,
    pub delta: S,
    pub holds: bool,
    pub failures: Vec<RelationFailure<S>>,
    /// Conditions evaluated under an adopted reading of their quantifiers.
    pub interpreted: Vec<Condition>,
}

impl<S: Scalar> RelationCheckReport<S> {
    pub fn failed(&self, c: Condition) -> bool {
        self.failures.iter().any(|f| f.condition == c)
    }
}

fn check_dims<S: Scalar>(a: &FiniteGmdp<S>, b: &FiniteGmdp<S>) -> Result<()> {
    if a.output_dim() != b.output_dim() {
        return Err(Error::OutputDimensionMismatch {
            left: a.output_dim(),
            right: b.output_dim(),
        });
    }
    Ok(())
}

struct Ctx<'a, S> {
    a: &'a FiniteGmdp<S>,
    b: &'a FiniteGmdp<S>,
    rel: &'a StateRelation,
    eps: &'a S,
    delta: &'a S,
}

impl<S: Scalar> Ctx<'_, S> {
    fn required(&self) -> S {
        S::one() - self.delta.clone()
    }

    fn mass(&self, x: usize, u: usize, xh: usize, uh: usize) -> S {
        coupling_flow(self.a.row(x, u), self.b.row(xh, uh), |s, t| {
            self.rel.contains(s, t)
        })
    }

    fn lifts(&self, mass: &S) -> bool {
        approx_ge(mass, &self.required())
    }

    /// Coupling mass on related pairs inside the chosen target sets
    /// (secret/secret or non-secret/non-secret).
    fn restricted_mass(&self, x: usize, u: usize, xh: usize, uh: usize, secret: bool) -> S {
        let phi: Vec<(usize, S)> = self
            .a
            .row(x, u)
            .iter()
            .filter(|(s, _)| self.a.is_secret(*s) == secret)
            .cloned()
            .collect();
        let theta: Vec<(usize, S)> = self
            .b
            .row(xh, uh)
            .iter()
            .filter(|(t, _)| self.b.is_secret(*t) == secret)
            .cloned()
            .collect();
        coupling_flow(&phi, &theta, |s, t| self.rel.contains(s, t))
    }

    fn secret_mass(m: &FiniteGmdp<S>, x: usize, u: usize, secret: bool) -> S {
        m.row(x, u)
            .iter()
            .filter(|(s, _)| m.is_secret(*s) == secret)
            .fold(S::zero(), |a, (_, p)| a + p.clone())
    }

    fn failure(&self, c: Condition, x: Option<usize>, xh: Option<usize>) -> RelationFailure<S> {
        RelationFailure {
            condition: c,
            state_a: x.map(|x| self.a.state_name(x).to_string()),
            state_b: xh.map(|x| self.b.state_name(x).to_string()),
            input: None,
            achieved: None,
            required: None,
        }
    }

    fn initial_matching(&self, kind: RelationKind) -> Vec<RelationFailure<S>> {
        let mut out = Vec::new();
        let (restrict_a, restrict_b): (Option<bool>, Option<bool>) = match kind {
            RelationKind::InitSop => (Some(true), Some(false)),
            RelationKind::CurSop => (None, None),
        };
        for &x0 in self.a.initial_states() {
            if restrict_a.is_some_and(|s| self.a.is_secret(x0) != s) {
                continue;
            }
            let found = self.b.initial_states().iter().any(|&xh0| {
                restrict_a.is_none_or(|s| self.b.is_secret(xh0) == s) && self.rel.contains(x0, xh0)
            });
            if !found {
                out.push(self.failure(Condition::C1a, Some(x0), None));
            }
        }
        for &xh0 in self.b.initial_states() {
            if restrict_b.is_some_and(|s| self.b.is_secret(xh0) != s) {
                continue;
            }
            let found = self.a.initial_states().iter().any(|&x0| {
                restrict_b.is_none_or(|s| self.a.is_secret(x0) == s) && self.rel.contains(x0, xh0)
            });
            if !found {
                out.push(self.failure(Condition::C1b, None, Some(xh0)));
            }
        }
        out
    }

    /// `∀ u ∃ û` (from A) or `∀ û ∃ u` (from B) lifting check for one pair.
    fn forall_exists(
        &self,
        c: Condition,
        x: usize,
        xh: usize,
        from_a: bool,
    ) -> Vec<RelationFailure<S>> {
        let (outer, inner) = if from_a {
            (self.a.num_inputs(), self.b.num_inputs())
        } else {
            (self.b.num_inputs(), self.a.num_inputs())
        };
        let mut out = Vec::new();
        for v in 0..outer {
            let mut best = S::zero();
            let mut ok = false;
            for w in 0..inner {
                let (u, uh) = if from_a { (v, w) } else { (w, v) };
                let m = self.mass(x, u, xh, uh);
                if self.lifts(&m) {
                    ok = true;
                    break;
                }
                if m > best {
                    best = m;
                }
            }
            if !ok {
                let mut f = self.failure(c, Some(x), Some(xh));
                f.input = Some(
                    if from_a {
                        self.a.input_name(v)
                    } else {
                        self.b.input_name(v)
                    }
                    .to_string(),
                );
                f.achieved = Some(best);
                f.required = Some(self.required());
                out.push(f);
            }
        }
        out
    }

    /// Secret-landing (3b, from A) or non-secret-landing (3d, from B) check.
    fn landing(&self, c: Condition, x: usize, xh: usize, from_a: bool) -> Vec<RelationFailure<S>> {
        let secret = from_a;
        let (outer, inner) = if from_a {
            (self.a.num_inputs(), self.b.num_inputs())
        } else {
            (self.b.num_inputs(), self.a.num_inputs())
        };
        let mut out = Vec::new();
        for v in 0..outer {
            let source_mass = if from_a {
                Self::secret_mass(self.a, x, v, secret)
            } else {
                Self::secret_mass(self.b, xh, v, secret)
            };
            if source_mass <= S::zero() {
                continue;
            }
            let needed = self.required() * source_mass;
            let mut best = S::zero();
            let mut ok = false;
            for w in 0..inner {
                let (u, uh) = if from_a { (v, w) } else { (w, v) };
                if !self.lifts(&self.mass(x, u, xh, uh)) {
                    continue;
                }
                let m = self.restricted_mass(x, u, xh, uh, secret);
                if approx_ge(&m, &needed) {
                    ok = true;
                    break;
                }
                if m > best {
                    best = m;
                }
            }
            if !ok {
                let mut f = self.failure(c, Some(x), Some(xh));
                f.input = Some(
                    if from_a {
                        self.a.input_name(v)
                    } else {
                        self.b.input_name(v)
                    }
                    .to_string(),
                );
                f.achieved = Some(best);
                f.required = Some(needed);
                out.push(f);
            }
        }
        out
    }

    fn pair_checks(&self, kind: RelationKind, x: usize, xh: usize) -> Vec<RelationFailure<S>> {
        let dist = self.a.output_distance_to(x, self.b, xh);
        if !approx_le(&dist, self.eps) {
            let mut f = self.failure(Condition::C2, Some(x), Some(xh));
            f.achieved = Some(dist);
            f.required = Some(self.eps.clone());
            return vec![f];
        }
        let mut out = Vec::new();
        match kind {
            RelationKind::InitSop => {
                out.extend(self.forall_exists(Condition::C3a, x, xh, false));
                out.extend(self.forall_exists(Condition::C3b, x, xh, true));
            }
            RelationKind::CurSop => {
                out.extend(self.forall_exists(Condition::C3a, x, xh, true));
                out.extend(self.landing(Condition::C3b, x, xh, true));
                out.extend(self.forall_exists(Condition::C3c, x, xh, false));
                out.extend(self.landing(Condition::C3d, x, xh, false));
            }
        }
        out
    }
}

fn check<S: Scalar>(
    kind: RelationKind,
    a: &FiniteGmdp<S>,
    b: &FiniteGmdp<S>,
    rel: &StateRelation,
    eps: &S,
    delta: &S,
) -> Result<RelationCheckReport<S>> {
    check_dims(a, b)?;
    if *delta < S::zero() || *delta > S::one() {
        return Err(Error::InvalidParameter(format!(
            "delta must lie in [0, 1], got {}",
            delta.to_literal()
        )));
    }
    for &(x, xh) in rel.pairs() {
        if x >= a.num_states() || xh >= b.num_states() {
            return Err(Error::InvalidParameter(format!(
                "relation pair ({x}, {xh}) is out of range"
            )));
        }
    }
    let ctx = Ctx {
        a,
        b,
        rel,
        eps,
        delta,
    };
    let mut failures = ctx.initial_matching(kind);
    let per_pair: Vec<Vec<RelationFailure<S>>> = rel
        .pairs()
        .par_iter()
        .map(|&(x, xh)| ctx.pair_checks(kind, x, xh))
        .collect();
    failures.extend(per_pair.into_iter().flatten());
    let interpreted = match kind {
        RelationKind::InitSop => Vec::new(),
        RelationKind::CurSop => vec![Condition::C3b, Condition::C3d],
    };
    Ok(RelationCheckReport {
        kind,
        eps: eps.clone(),
        delta: delta.clone(),
        holds: failures.is_empty(),
        failures,
        interpreted,
    })
}

pub fn check_initsop<S: Scalar>(
    a: &FiniteGmdp<S>,
    b: &FiniteGmdp<S>,
    rel: &StateRelation,
    eps: &S,
    delta: &S,
) -> Result<RelationCheckReport<S>> {
    check(RelationKind::InitSop, a, b, rel, eps, delta)
}

/// Conditions 3b and 3d are read as: for an input whose successor law puts
/// mass `m` on secret (resp. non-secret) states, some matching input must
/// both lift the relation and couple at least `(1 - delta) m` of that mass
/// onto related secret (resp. non-secret) pairs.
pub fn check_cursop<S: Scalar>(
    a: &FiniteGmdp<S>,
    b: &FiniteGmdp<S>,
    rel: &StateRelation,
    eps: &S,
    delta: &S,
) -> Result<RelationCheckReport<S>> {
    check(RelationKind::CurSop, a, b, rel, eps, delta)
}

pub fn check_relation<S: Scalar>(
    kind: RelationKind,
    a: &FiniteGmdp<S>,
    b: &FiniteGmdp<S>,
    rel: &StateRelation,
    eps: &S,
    delta: &S,
) -> Result<RelationCheckReport<S>> {
    check(kind, a, b, rel, eps, delta)
}

#[derive(Debug, Clone, PartialEq)]
pub struct GuaranteeTransfer<S> {
    pub kind: EstimatorKind,
    pub eps_abstract: S,
    pub lambda_abstract: S,
    pub eps_rel: S,
    pub delta: S,
    pub horizon: usize,
    pub gamma_delta: S,
    pub eps_concrete: S,
    pub lambda_concrete: S,
}

/// `1 - (1 - delta)^n`.
pub fn gamma_delta<S: Scalar>(delta: &S, n: usize) -> S {
    let keep = S::one() - delta.clone();
    let mut pow = S::one();
    for _ in 0..n {
        pow = pow * keep.clone();
    }
    S::one() - pow
}

/// Guarantee implied on the concrete system by an abstract `(eps_abs, lambda)` verdict.
pub fn transfer_parameters<S: Scalar>(
    kind: EstimatorKind,
    eps_abs: &S,
    lambda: &S,
    eps_rel: &S,
    delta: &S,
    n: usize,
) -> Result<GuaranteeTransfer<S>> {
    if *delta < S::zero() || *delta > S::one() {
        return Err(Error::InvalidParameter(format!(
            "delta must lie in [0, 1], got {}",
            delta.to_literal()
        )));
    }
    let gamma = gamma_delta(delta, n);
    if !approx_le(&gamma, lambda) {
        return Err(Error::HypothesisViolation {
            gamma: gamma.to_literal(),
            lambda: lambda.to_literal(),
        });
    }
    let two = S::one() + S::one();
    let lambda_concrete = (S::one() - gamma.clone()) * (lambda.clone() - gamma.clone());
    Ok(GuaranteeTransfer {
        kind,
        eps_abstract: eps_abs.clone(),
        lambda_abstract: lambda.clone(),
        eps_rel: eps_rel.clone(),
        delta: delta.clone(),
        horizon: n,
        gamma_delta: gamma,
        eps_concrete: eps_abs.clone() + two * eps_rel.clone(),
        lambda_concrete,
    })
}

pub fn transfer_guarantee<S: Scalar>(
    verdict: &OpacityVerdict<S>,
    eps_rel: &S,
    delta: &S,
) -> Result<GuaranteeTransfer<S>> {
    if !verdict.opaque {
        return Err(Error::AbstractNotOpaque);
    }
    transfer_parameters(
        verdict.kind,
        &verdict.eps,
        &verdict.lambda,
        eps_rel,
        delta,
        verdict.horizon,
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;
    use crate::gmdp::GmdpDocument;
    use num_rational::BigRational;

    fn q(n: i64, d: i64) -> BigRational {
        BigRational::new(n.into(), d.into())
    }

    fn relation_pair() -> (
        FiniteGmdp<BigRational>,
        FiniteGmdp<BigRational>,
        StateRelation,
    ) {
        let a = fixtures::relation_concrete();
        let b = fixtures::relation_abstract();
        let rel = StateRelation::from_names(&a, &b, &fixtures::RELATION_PAIRS).unwrap();
        (a, b, rel)
    }

    #[test]
    fn relation_example_holds() {
        let (a, b, rel) = relation_pair();
        let r = check_initsop(&a, &b, &rel, &q(1, 10), &q(1, 10)).unwrap();
        assert!(r.holds, "{:?}", r.failures);
    }

    #[test]
    fn relation_example_needs_delta() {
        let (a, b, rel) = relation_pair();
        let r = check_initsop(&a, &b, &rel, &q(1, 10), &q(1, 20)).unwrap();
        assert!(!r.holds);
        let f = r
            .failures
            .iter()
            .find(|f| f.condition == Condition::C3a)
            .unwrap();
        assert_eq!(f.state_a.as_deref(), Some("A"));
        assert_eq!(f.achieved, Some(q(9, 10)));
    }

    #[test]
    fn tight_eps_fails_output_condition() {
        let (a, b, rel) = relation_pair();
        let r = check_initsop(&a, &b, &rel, &q(1, 100), &q(1, 10)).unwrap();
        assert!(r.failed(Condition::C2));
        assert!(r.failures.iter().all(|f| f.condition == Condition::C2));
        // Every pair with a gap above 0.01 is reported.
        assert_eq!(r.failures.len(), 4);
    }

    #[test]
    fn identity_relations_hold() {
        let zero = q(0, 1);
        for m in [
            fixtures::five_state::<BigRational>(),
            fixtures::relation_concrete(),
            fixtures::branching_two_input(),
        ] {
            let id = StateRelation::identity(m.num_states());
            assert!(check_initsop(&m, &m, &id, &zero, &zero).unwrap().holds);
            assert!(check_cursop(&m, &m, &id, &zero, &zero).unwrap().holds);
        }
    }

    #[test]
    fn cursop_secret_landing_failure() {
        let a = GmdpDocument::new(["x", "y"], ["u"])
            .with_initial(["x"])
            .with_secret(["y"])
            .output("x", vec![q(0, 1)])
            .output("y", vec![q(0, 1)])
            .transition("x", "u", "y", q(1, 1))
            .transition("y", "u", "y", q(1, 1))
            .into_model()
            .unwrap();
        let b = GmdpDocument::new(["p", "r"], ["v"])
            .with_initial(["p"])
            .output("p", vec![q(0, 1)])
            .output("r", vec![q(0, 1)])
            .transition("p", "v", "r", q(1, 1))
            .transition("r", "v", "r", q(1, 1))
            .into_model()
            .unwrap();
        let rel = StateRelation::from_names(&a, &b, &[("x", "p"), ("y", "r")]).unwrap();
        let r = check_cursop(&a, &b, &rel, &q(0, 1), &q(0, 1)).unwrap();
        assert!(!r.holds);
        let f = r
            .failures
            .iter()
            .find(|f| f.condition == Condition::C3b)
            .unwrap();
        assert_eq!(
            (
                f.state_a.as_deref(),
                f.state_b.as_deref(),
                f.input.as_deref()
            ),
            (Some("x"), Some("p"), Some("u"))
        );
        assert!(r.interpreted.contains(&Condition::C3b));
        // The initial-state relation has no landing conditions.
        assert!(
            check_initsop(&a, &b, &rel, &q(0, 1), &q(0, 1))
                .unwrap()
                .holds
        );
    }

    #[test]
    fn dimension_mismatch() {
        let a = fixtures::five_state::<BigRational>();
        let b = GmdpDocument::new(["s"], ["u"])
            .with_initial(["s"])
            .output("s", vec![q(0, 1), q(0, 1)])
            .transition("s", "u", "s", q(1, 1))
            .into_model()
            .unwrap();
        let rel = StateRelation::new([(0, 0)]);
        assert!(matches!(
            check_initsop(&a, &b, &rel, &q(0, 1), &q(0, 1)),
            Err(Error::OutputDimensionMismatch { .. })
        ));
    }

    #[test]
    fn transfer_examples() {
        let t = transfer_parameters(
            EstimatorKind::Initial,
            &q(5, 100),
            &q(1, 1),
            &q(1, 1),
            &q(15, 100),
            3,
        )
        .unwrap();
        assert_eq!(t.eps_concrete, q(205, 100));
        let base = q(7225, 10000);
        assert_eq!(t.lambda_concrete, base.clone() * base.clone() * base);
        let t = transfer_parameters(
            EstimatorKind::Initial,
            &q(0, 1),
            &q(7, 10),
            &q(3, 1),
            &q(0, 1),
            1,
        )
        .unwrap();
        assert_eq!(t.gamma_delta, q(0, 1));
        assert_eq!(t.lambda_concrete, q(7, 10));
        assert!(matches!(
            transfer_parameters(
                EstimatorKind::Initial,
                &q(0, 1),
                &q(1, 2),
                &q(0, 1),
                &q(1, 2),
                2
            ),
            Err(Error::HypothesisViolation { .. })
        ));
    }
}
