//! Grid abstractions of scalar affine systems with additive Gaussian noise,
//!
//! `x' = a x + b u + d w`, `y = c x`, `w ~ N(0, 1)`,
//!
//! and the quantization bounds implied by a δ-ISS certificate whose
//! comparison functions are linear (`f(s) = k s`).

use rayon::prelude::*;
use statrs::function::erf::erfc;

use crate::error::{Error, Result};
use crate::gmdp::{FiniteGmdp, GmdpDocument};
use crate::scalar::{approx_ge, approx_le, min_of, Scalar};

/// Entries at or below this mass are dropped from a kernel row and folded
/// into the nearest kept cell.
pub const PRUNE_FLOOR: f64 = 1e-12;

const COUNT_GUARD: f64 = 1e-9;

/// Closed interval `[lo, hi]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
}

impl Interval {
    pub fn new(lo: f64, hi: f64) -> Self {
        Self { lo, hi }
    }

    pub fn span(&self) -> f64 {
        self.hi - self.lo
    }

    pub fn contains(&self, x: f64) -> bool {
        self.lo <= x && x <= self.hi
    }

    pub fn is_within(&self, outer: &Interval) -> bool {
        outer.lo <= self.lo && self.hi <= outer.hi
    }

    pub fn inflate(&self, r: f64) -> Self {
        Self {
            lo: self.lo - r,
            hi: self.hi + r,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum InputDomain {
    Finite(Vec<f64>),
    Interval(Interval),
}

#[derive(Debug, Clone, PartialEq)]
pub struct ContinuousAffineSystem {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub d: f64,
    pub state_domain: Interval,
    pub initial_domain: Interval,
    pub secret_domain: Vec<Interval>,
    pub input_domain: InputDomain,
}

impl ContinuousAffineSystem {
    // Negated comparisons also reject NaN bounds.
    #[allow(clippy::neg_cmp_op_on_partial_ord)]
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidParameter(m));
        for (name, v) in [("a", self.a), ("b", self.b), ("c", self.c), ("d", self.d)] {
            if !v.is_finite() {
                return bad(format!("coefficient {name} is not finite"));
            }
        }
        if self.d < 0.0 {
            return bad(format!("noise coefficient d must be >= 0, got {}", self.d));
        }
        if !(self.state_domain.lo < self.state_domain.hi) {
            return bad("state domain must have positive length".into());
        }
        if !(self.initial_domain.lo <= self.initial_domain.hi)
            || !self.initial_domain.is_within(&self.state_domain)
        {
            return bad("initial domain must be an interval inside the state domain".into());
        }
        for s in &self.secret_domain {
            if !(s.lo <= s.hi) || !s.is_within(&self.state_domain) {
                return bad("secret intervals must lie inside the state domain".into());
            }
        }
        match &self.input_domain {
            InputDomain::Finite(v) if v.is_empty() => bad("input set is empty".into()),
            InputDomain::Finite(v) if v.iter().any(|u| !u.is_finite()) => {
                bad("input value is not finite".into())
            }
            InputDomain::Interval(i) if !(i.lo <= i.hi) => bad("input interval is empty".into()),
            _ => Ok(()),
        }
    }
}

/// Slopes of linear comparison functions.
#[derive(Debug, Clone, PartialEq)]
pub struct DeltaIssCertificate<S> {
    pub alpha_lo: S,
    pub alpha_hi: S,
    pub kappa: S,
    pub rho: S,
    pub gamma: S,
    pub ell: S,
}

impl<S: Scalar> DeltaIssCertificate<S> {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("alpha_lo", &self.alpha_lo),
            ("alpha_hi", &self.alpha_hi),
            ("gamma", &self.gamma),
            ("ell", &self.ell),
        ];
        for (name, v) in positive {
            if *v <= S::zero() {
                return Err(Error::InvalidParameter(format!("{name} must be > 0")));
            }
        }
        if self.alpha_lo > self.alpha_hi {
            return Err(Error::InvalidParameter(
                "alpha_lo must not exceed alpha_hi".into(),
            ));
        }
        if self.rho < S::zero() {
            return Err(Error::InvalidParameter("rho must be >= 0".into()));
        }
        if self.kappa <= S::zero() || self.kappa > S::one() {
            return Err(Error::InvalidParameter("kappa must lie in (0, 1]".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AbstractionParams<S> {
    pub eta: S,
    pub theta: S,
    pub mu: S,
    pub eps: S,
    pub delta: S,
}

impl<S: Scalar> AbstractionParams<S> {
    fn validate(&self) -> Result<()> {
        if self.eta <= S::zero() {
            return Err(Error::InvalidParameter("eta must be > 0".into()));
        }
        if self.theta < S::zero() || self.mu < S::zero() {
            return Err(Error::InvalidParameter("theta and mu must be >= 0".into()));
        }
        if self.eps <= S::zero() {
            return Err(Error::InvalidParameter("eps must be > 0".into()));
        }
        if self.delta <= S::zero() || self.delta > S::one() {
            return Err(Error::InvalidParameter("delta must lie in (0, 1]".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FeasibilityReport<S> {
    /// Argument of `γ⁻¹` in the η bound.
    pub gamma_argument: S,
    /// `None` when no positive η satisfies the bound.
    pub eta_max: Option<S>,
    pub eta_ok: bool,
    /// `ℓ⁻¹(ε)`, required of θ by the current-state check.
    pub theta_min: Option<S>,
    pub theta_ok: bool,
    pub feasible: bool,
    pub passes: bool,
}

/// `α̲(ℓ⁻¹(ε))`: largest `|x - x̂|` of a related pair.
pub fn relation_radius<S: Scalar>(cert: &DeltaIssCertificate<S>, eps: &S) -> S {
    cert.alpha_lo.clone() * eps.clone() / cert.ell.clone()
}

fn eta_bound<S: Scalar>(
    cert: &DeltaIssCertificate<S>,
    params: &AbstractionParams<S>,
) -> (S, Option<S>) {
    let r = relation_radius(cert, &params.eps);
    let arg = r.clone() * params.delta.clone()
        - (S::one() - cert.kappa.clone()) * r.clone()
        - cert.rho.clone() * params.mu.clone();
    if arg <= S::zero() {
        return (arg, None);
    }
    let bound = min_of(arg.clone() / cert.gamma.clone(), r / cert.alpha_hi.clone());
    (arg, Some(bound))
}

pub fn check_initsop_params<S: Scalar>(
    cert: &DeltaIssCertificate<S>,
    params: &AbstractionParams<S>,
) -> Result<FeasibilityReport<S>> {
    cert.validate()?;
    params.validate()?;
    let (gamma_argument, eta_max) = eta_bound(cert, params);
    let eta_ok = eta_max.as_ref().is_some_and(|m| approx_le(&params.eta, m));
    Ok(FeasibilityReport {
        gamma_argument,
        feasible: eta_max.is_some(),
        eta_max,
        eta_ok,
        theta_min: None,
        theta_ok: true,
        passes: eta_ok,
    })
}

pub fn check_cursop_params<S: Scalar>(
    cert: &DeltaIssCertificate<S>,
    params: &AbstractionParams<S>,
) -> Result<FeasibilityReport<S>> {
    let mut report = check_initsop_params(cert, params)?;
    let theta_min = params.eps.clone() / cert.ell.clone();
    report.theta_ok = approx_ge(&params.theta, &theta_min);
    report.theta_min = Some(theta_min);
    report.passes = report.eta_ok && report.theta_ok;
    Ok(report)
}

/// Standard normal upper tail `P(Z > z)`.
fn upper_tail(z: f64) -> f64 {
    0.5 * erfc(z / std::f64::consts::SQRT_2)
}

/// Standard normal CDF.
pub fn normal_cdf(z: f64) -> f64 {
    upper_tail(-z)
}

/// `P(lo <= m + d W < hi)` for `W ~ N(0, 1)`, `d > 0`. Tails are taken from
/// the side that avoids cancellation.
pub fn gaussian_cell_mass(mean: f64, d: f64, lo: f64, hi: f64) -> f64 {
    let zl = (lo - mean) / d;
    let zh = (hi - mean) / d;
    let mass = if zl >= 0.0 {
        upper_tail(zl) - upper_tail(zh)
    } else if zh <= 0.0 {
        normal_cdf(zh) - normal_cdf(zl)
    } else {
        1.0 - normal_cdf(zl) - upper_tail(zh)
    };
    mass.max(0.0)
}

/// Uniform grid over an interval with cells `[lo, hi)`, the last one closed.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    pub domain: Interval,
    pub eta: f64,
    pub cells: Vec<Interval>,
}

impl Grid {
    #[allow(clippy::neg_cmp_op_on_partial_ord)]
    pub fn new(domain: Interval, eta: f64) -> Result<Self> {
        if !(eta > 0.0) {
            return Err(Error::InvalidParameter("eta must be > 0".into()));
        }
        let span = domain.span();
        if eta > span + COUNT_GUARD {
            return Err(Error::InvalidParameter(format!(
                "eta = {eta} exceeds the domain span {span}"
            )));
        }
        let count = ((span / eta) - COUNT_GUARD).ceil().max(1.0) as usize;
        let cells = (0..count)
            .map(|k| {
                let lo = domain.lo + k as f64 * eta;
                let hi = if k + 1 == count {
                    domain.hi
                } else {
                    domain.lo + (k + 1) as f64 * eta
                };
                Interval::new(lo, hi)
            })
            .collect();
        Ok(Self { domain, eta, cells })
    }

    pub fn len(&self) -> usize {
        self.cells.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }

    pub fn center(&self, k: usize) -> f64 {
        0.5 * (self.cells[k].lo + self.cells[k].hi)
    }

    /// Cell holding `x`; points outside the domain go to the boundary cells.
    pub fn locate(&self, x: f64) -> usize {
        let last = self.cells.len() - 1;
        if x <= self.domain.lo {
            return 0;
        }
        if x >= self.cells[last].lo {
            return last;
        }
        let k = ((x - self.domain.lo) / self.eta).floor() as usize;
        let k = k.min(last);
        // Guard the floor against rounding at cell edges.
        if x < self.cells[k].lo {
            k - 1
        } else if k < last && x >= self.cells[k].hi {
            k + 1
        } else {
            k
        }
    }

    /// Cells sharing a set of positive length with `set`, or containing it
    /// when `set` is a single point.
    pub fn intersecting(&self, set: &Interval) -> Vec<usize> {
        if set.lo == set.hi {
            if self.domain.contains(set.lo) {
                return vec![self.locate(set.lo)];
            }
            return Vec::new();
        }
        (0..self.len())
            .filter(|&k| self.cells[k].lo < set.hi && set.lo < self.cells[k].hi)
            .collect()
    }
}

#[allow(clippy::neg_cmp_op_on_partial_ord)]
fn quantize_inputs(domain: &InputDomain, mu: f64) -> Result<Vec<f64>> {
    match domain {
        InputDomain::Finite(values) => Ok(values.clone()),
        InputDomain::Interval(i) if i.lo == i.hi => Ok(vec![i.lo]),
        InputDomain::Interval(i) => {
            if !(mu > 0.0) {
                return Err(Error::InvalidParameter(
                    "an interval input domain needs mu > 0".into(),
                ));
            }
            let grid = Grid::new(*i, (2.0 * mu).min(i.span()))?;
            Ok((0..grid.len()).map(|k| grid.center(k)).collect())
        }
    }
}

fn input_literal(u: f64) -> String {
    let s = format!("{u}");
    if s == "-0" {
        "0".into()
    } else {
        s
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClampedMass {
    pub state: String,
    pub input: String,
    pub mass: f64,
}

#[derive(Debug, Clone)]
pub struct AbstractionMeta {
    pub eta: f64,
    pub theta: f64,
    pub mu: f64,
    pub eps: f64,
    pub delta: f64,
    pub relation_radius: Option<f64>,
    pub clamped: Vec<ClampedMass>,
    pub cells: Vec<Interval>,
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone)]
pub struct Abstraction {
    pub model: FiniteGmdp<f64>,
    pub meta: AbstractionMeta,
}

/// Kernel row over the grid from mean `m`: Gaussian cell masses with
/// out-of-domain tails moved to the boundary cells, tiny entries folded into
/// the nearest kept cell. Returns the row and the clamped mass.
pub fn kernel_row(grid: &Grid, mean: f64, d: f64) -> (Vec<f64>, f64) {
    let n = grid.len();
    let mut row = vec![0.0; n];
    if d == 0.0 {
        let k = grid.locate(mean);
        row[k] = 1.0;
        let clamped = if grid.domain.contains(mean) { 0.0 } else { 1.0 };
        return (row, clamped);
    }
    for (k, cell) in grid.cells.iter().enumerate() {
        row[k] = gaussian_cell_mass(mean, d, cell.lo, cell.hi);
    }
    let below = normal_cdf((grid.domain.lo - mean) / d);
    let above = upper_tail((grid.domain.hi - mean) / d);
    row[0] += below;
    row[n - 1] += above;
    let kept: Vec<usize> = (0..n).filter(|&k| row[k] > PRUNE_FLOOR).collect();
    if kept.len() < n {
        for k in 0..n {
            if row[k] > PRUNE_FLOOR || row[k] == 0.0 {
                continue;
            }
            let target = *kept
                .iter()
                .min_by_key(|&&j| j.abs_diff(k))
                .expect("some cell keeps mass");
            row[target] += row[k];
            row[k] = 0.0;
        }
        for v in row.iter_mut() {
            if *v <= PRUNE_FLOOR {
                *v = 0.0;
            }
        }
    }
    (row, below + above)
}

pub fn build_abstraction(
    sys: &ContinuousAffineSystem,
    params: &AbstractionParams<f64>,
    cert: Option<&DeltaIssCertificate<f64>>,
) -> Result<Abstraction> {
    sys.validate()?;
    params.validate()?;
    let grid = Grid::new(sys.state_domain, params.eta)?;
    let inputs = quantize_inputs(&sys.input_domain, params.mu)?;
    let names: Vec<String> = (1..=grid.len()).map(|k| format!("q{k}")).collect();
    let input_names: Vec<String> = inputs.iter().map(|&u| input_literal(u)).collect();
    if input_names
        .iter()
        .enumerate()
        .any(|(i, n)| input_names[..i].contains(n))
    {
        return Err(Error::InvalidParameter(
            "input values must be distinct".into(),
        ));
    }

    let mut warnings = Vec::new();
    let mut pieces: Vec<Interval> = Vec::new();
    let mut lo = sys.state_domain.lo;
    let mut sorted = sys.secret_domain.clone();
    sorted.sort_by(|a, b| a.lo.total_cmp(&b.lo));
    for s in &sorted {
        if s.lo > lo {
            pieces.push(Interval::new(lo, s.lo));
        }
        lo = lo.max(s.hi);
    }
    if lo < sys.state_domain.hi {
        pieces.push(Interval::new(lo, sys.state_domain.hi));
    }
    let secret_min = sorted
        .iter()
        .map(Interval::span)
        .fold(f64::INFINITY, f64::min);
    let public_min = pieces
        .iter()
        .map(Interval::span)
        .fold(f64::INFINITY, f64::min);
    if params.eta > secret_min.min(public_min) + COUNT_GUARD {
        warnings.push(format!(
            "eta = {} exceeds the smallest secret or non-secret piece ({})",
            params.eta,
            secret_min.min(public_min)
        ));
    }
    if let Some(cert) = cert {
        if !check_initsop_params(cert, params)?.passes {
            warnings.push("parameters fail the initial-state feasibility check".into());
        }
    }

    let mut secret: Vec<usize> = Vec::new();
    for s in &sys.secret_domain {
        secret.extend(grid.intersecting(&s.inflate(params.theta)));
    }
    secret.sort_unstable();
    secret.dedup();
    let initial = grid.intersecting(&sys.initial_domain);

    let rows: Vec<Vec<(Vec<f64>, f64)>> = (0..grid.len())
        .into_par_iter()
        .map(|k| {
            let x = grid.center(k);
            inputs
                .iter()
                .map(|&u| kernel_row(&grid, sys.a * x + sys.b * u, sys.d))
                .collect()
        })
        .collect();

    let mut doc = GmdpDocument::new(names.iter().cloned(), input_names.iter().cloned())
        .with_initial(initial.iter().map(|&k| names[k].clone()))
        .with_secret(secret.iter().map(|&k| names[k].clone()));
    for (k, name) in names.iter().enumerate() {
        doc = doc.output(name, vec![sys.c * grid.center(k)]);
    }
    let mut clamped = Vec::new();
    for (k, per_input) in rows.iter().enumerate() {
        for (j, (row, out)) in per_input.iter().enumerate() {
            for (t, p) in row.iter().enumerate() {
                if *p > 0.0 {
                    doc = doc.transition(&names[k], &input_names[j], &names[t], *p);
                }
            }
            clamped.push(ClampedMass {
                state: names[k].clone(),
                input: input_names[j].clone(),
                mass: *out,
            });
        }
    }
    let model = doc.into_model()?;
    Ok(Abstraction {
        model,
        meta: AbstractionMeta {
            eta: params.eta,
            theta: params.theta,
            mu: params.mu,
            eps: params.eps,
            delta: params.delta,
            relation_radius: cert.map(|c| relation_radius(c, &params.eps)),
            clamped,
            cells: grid.cells.clone(),
            warnings,
        },
    })
}
