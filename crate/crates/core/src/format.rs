//! JSON documents: models, estimators, relations, continuous systems and
//! the reports of every analysis.
//!
//! Numbers are kept as their source literals on read, and written in the
//! scalar's canonical form (`n/d` strings for non-terminating rationals), so
//! `write(read(file))` reproduces a file the writer produced byte for byte.
//! Layout: one key per line at the top level, containers holding only
//! scalars (or short nested lists of scalars) on a single line.

use std::fmt::Debug;
use std::hash::Hash;
use std::str::FromStr;

use serde_json::{Map, Number, Value};

use crate::abstraction::{
    Abstraction, ContinuousAffineSystem, DeltaIssCertificate, FeasibilityReport, InputDomain,
    Interval,
};
use crate::error::{Error, Result};
use crate::estimator::{EstimatorGmdp, EstimatorKind};
use crate::gmdp::{GmdpDocument, KernelEntry};
use crate::montecarlo::Estimate;
use crate::reachability::OpacityVerdict;
use crate::relations::{GuaranteeTransfer, RelationCheckReport};
use crate::scalar::Scalar;

const INLINE_WIDTH: usize = 100;

/// Tool version and command line, attached to every report.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Provenance {
    pub version: String,
    pub invocation: Vec<String>,
}

impl Provenance {
    pub fn new(version: impl Into<String>, invocation: Vec<String>) -> Self {
        Self {
            version: version.into(),
            invocation,
        }
    }
}

// ---- canonical text layout ----

fn is_scalar(v: &Value) -> bool {
    !matches!(v, Value::Array(_) | Value::Object(_))
}

fn flat(v: &Value) -> bool {
    match v {
        Value::Array(a) => a.iter().all(is_scalar),
        Value::Object(o) => o.values().all(is_scalar),
        _ => true,
    }
}

fn compact(v: &Value, out: &mut String) {
    match v {
        Value::Array(a) => {
            out.push('[');
            for (i, x) in a.iter().enumerate() {
                if i > 0 {
                    out.push_str(", ");
                }
                compact(x, out);
            }
            out.push(']');
        }
        Value::Object(o) => {
            out.push('{');
            for (i, (k, x)) in o.iter().enumerate() {
                if i > 0 {
                    out.push_str(", ");
                }
                out.push_str(&Value::String(k.clone()).to_string());
                out.push_str(": ");
                compact(x, out);
            }
            out.push('}');
        }
        scalar => out.push_str(&scalar.to_string()),
    }
}

fn inline_form(v: &Value, top: bool) -> Option<String> {
    if top && !is_scalar(v) {
        return None;
    }
    let children_ok = match v {
        Value::Array(a) => a.iter().all(flat),
        Value::Object(o) => o.values().all(flat),
        _ => true,
    };
    if !children_ok {
        return None;
    }
    let mut s = String::new();
    compact(v, &mut s);
    (s.len() <= INLINE_WIDTH || flat(v) && v.as_array().is_some_and(|a| a.iter().all(is_scalar)))
        .then_some(s)
}

fn layout(v: &Value, indent: usize, top: bool, out: &mut String) {
    if let Some(s) = inline_form(v, top) {
        out.push_str(&s);
        return;
    }
    let pad = "  ".repeat(indent + 1);
    match v {
        Value::Array(a) => {
            out.push_str("[\n");
            for (i, x) in a.iter().enumerate() {
                out.push_str(&pad);
                layout(x, indent + 1, false, out);
                out.push_str(if i + 1 < a.len() { ",\n" } else { "\n" });
            }
            out.push_str(&"  ".repeat(indent));
            out.push(']');
        }
        Value::Object(o) => {
            out.push_str("{\n");
            for (i, (k, x)) in o.iter().enumerate() {
                out.push_str(&pad);
                out.push_str(&Value::String(k.clone()).to_string());
                out.push_str(": ");
                layout(x, indent + 1, false, out);
                out.push_str(if i + 1 < o.len() { ",\n" } else { "\n" });
            }
            out.push_str(&"  ".repeat(indent));
            out.push('}');
        }
        _ => unreachable!("scalars are inline"),
    }
}

/// Canonical text of a JSON value, newline-terminated.
pub fn to_canonical_string(v: &Value) -> String {
    let mut out = String::new();
    layout(v, 0, true, &mut out);
    out.push('\n');
    out
}

// ---- scalar encoding ----

/// JSON number where the literal is one, string otherwise.
pub fn scalar_value<S: Scalar>(v: &S) -> Value {
    let lit = v.to_literal();
    match Number::from_str(&lit) {
        Ok(n) => Value::Number(n),
        Err(_) => Value::String(lit),
    }
}

fn f64_value(v: f64) -> Value {
    scalar_value(&v)
}

fn parse_scalar<S: Scalar>(v: &Value, what: &str) -> Result<S> {
    let lit = match v {
        Value::Number(n) => n.to_string(),
        Value::String(s) => s.clone(),
        _ => return Err(Error::Parse(format!("{what}: expected a number, got {v}"))),
    };
    S::parse_literal(&lit)
        .ok_or_else(|| Error::Parse(format!("{what}: cannot parse `{lit}` as a number")))
}

fn parse_f64(v: &Value, what: &str) -> Result<f64> {
    parse_scalar::<f64>(v, what)
}

fn parse_json(text: &str) -> Result<Value> {
    serde_json::from_str(text).map_err(Error::from)
}

fn as_object<'a>(v: &'a Value, what: &str) -> Result<&'a Map<String, Value>> {
    v.as_object()
        .ok_or_else(|| Error::Parse(format!("{what}: expected an object")))
}

fn field<'a>(o: &'a Map<String, Value>, key: &str) -> Result<&'a Value> {
    o.get(key)
        .ok_or_else(|| Error::Parse(format!("missing key `{key}`")))
}

fn string_list(v: &Value, what: &str) -> Result<Vec<String>> {
    let arr = v
        .as_array()
        .ok_or_else(|| Error::Parse(format!("{what}: expected an array")))?;
    arr.iter()
        .map(|x| {
            x.as_str()
                .map(str::to_string)
                .ok_or_else(|| Error::Parse(format!("{what}: expected strings, got {x}")))
        })
        .collect()
}

fn str_value(s: &str) -> Value {
    Value::String(s.to_string())
}

fn strings(items: impl IntoIterator<Item = impl AsRef<str>>) -> Value {
    Value::Array(items.into_iter().map(|s| str_value(s.as_ref())).collect())
}

fn provenance_fields(p: &Provenance, o: &mut Map<String, Value>) {
    o.insert("version".into(), str_value(&p.version));
    o.insert("invocation".into(), strings(&p.invocation));
}

// ---- gMDP documents ----

/// gMDP document with the optional `meta` block of an abstraction.
#[derive(Debug, Clone)]
pub struct GmdpFile<S> {
    pub document: GmdpDocument<S>,
    pub meta: Option<Value>,
}

pub fn parse_gmdp<S: Scalar>(text: &str) -> Result<GmdpFile<S>> {
    let root = parse_json(text)?;
    let o = as_object(&root, "model")?;
    for key in o.keys() {
        if !matches!(
            key.as_str(),
            "states"
                | "inputs"
                | "initial"
                | "secret"
                | "output_dim"
                | "outputs"
                | "kernel"
                | "meta"
        ) {
            return Err(Error::Parse(format!("unknown key `{key}`")));
        }
    }
    let states = string_list(field(o, "states")?, "states")?;
    let inputs = string_list(field(o, "inputs")?, "inputs")?;
    let initial = string_list(field(o, "initial")?, "initial")?;
    let secret = match o.get("secret") {
        Some(v) => string_list(v, "secret")?,
        None => Vec::new(),
    };
    let output_dim = field(o, "output_dim")?
        .as_u64()
        .ok_or_else(|| Error::Parse("output_dim: expected a non-negative integer".into()))?
        as usize;
    let outputs_obj = as_object(field(o, "outputs")?, "outputs")?;
    let mut outputs = Vec::with_capacity(outputs_obj.len());
    for (state, y) in outputs_obj {
        let arr = y
            .as_array()
            .ok_or_else(|| Error::Parse(format!("outputs.{state}: expected an array")))?;
        let y: Result<Vec<S>> = arr
            .iter()
            .map(|v| parse_scalar(v, &format!("outputs.{state}")))
            .collect();
        outputs.push((state.clone(), y?));
    }
    let kernel_arr = field(o, "kernel")?
        .as_array()
        .ok_or_else(|| Error::Parse("kernel: expected an array".into()))?;
    let mut kernel = Vec::with_capacity(kernel_arr.len());
    for (i, e) in kernel_arr.iter().enumerate() {
        let what = format!("kernel[{i}]");
        let eo = as_object(e, &what)?;
        let get = |k: &str| -> Result<String> {
            eo.get(k)
                .and_then(Value::as_str)
                .map(str::to_string)
                .ok_or_else(|| Error::Parse(format!("{what}.{k}: expected a string")))
        };
        kernel.push(KernelEntry {
            from: get("from")?,
            input: get("input")?,
            to: get("to")?,
            p: parse_scalar(field(eo, "p")?, &format!("{what}.p"))?,
        });
    }
    Ok(GmdpFile {
        document: GmdpDocument {
            states,
            inputs,
            initial,
            secret,
            output_dim,
            outputs,
            kernel,
        },
        meta: o.get("meta").cloned(),
    })
}

pub fn gmdp_value<S: Scalar>(doc: &GmdpDocument<S>, meta: Option<&Value>) -> Value {
    let mut o = Map::new();
    o.insert("states".into(), strings(&doc.states));
    o.insert("inputs".into(), strings(&doc.inputs));
    o.insert("initial".into(), strings(&doc.initial));
    o.insert("secret".into(), strings(&doc.secret));
    o.insert("output_dim".into(), Value::from(doc.output_dim));
    let mut outputs = Map::new();
    for (s, y) in &doc.outputs {
        outputs.insert(
            s.clone(),
            Value::Array(y.iter().map(scalar_value).collect()),
        );
    }
    o.insert("outputs".into(), Value::Object(outputs));
    let kernel = doc
        .kernel
        .iter()
        .map(|e| {
            let mut m = Map::new();
            m.insert("from".into(), str_value(&e.from));
            m.insert("input".into(), str_value(&e.input));
            m.insert("to".into(), str_value(&e.to));
            m.insert("p".into(), scalar_value(&e.p));
            Value::Object(m)
        })
        .collect();
    o.insert("kernel".into(), Value::Array(kernel));
    if let Some(meta) = meta {
        o.insert("meta".into(), meta.clone());
    }
    Value::Object(o)
}

pub fn write_gmdp<S: Scalar>(doc: &GmdpDocument<S>) -> String {
    to_canonical_string(&gmdp_value(doc, None))
}

pub fn write_gmdp_file<S: Scalar>(file: &GmdpFile<S>) -> String {
    to_canonical_string(&gmdp_value(&file.document, file.meta.as_ref()))
}

// ---- estimators ----

/// Estimator as a gMDP document: labels as state ids, `h(x)` as outputs, an
/// empty secret set and the extra keys `kind`, `eps` and `bad`.
pub fn write_estimator<S: Scalar, Q>(
    est: &EstimatorGmdp<S, Q>,
    base_outputs: &dyn Fn(usize) -> Vec<S>,
    output_dim: usize,
    eps: &S,
) -> String
where
    Q: Clone + Eq + Hash + Ord + Debug,
{
    let mut o = Map::new();
    o.insert("kind".into(), str_value(est.kind().as_str()));
    o.insert("eps".into(), scalar_value(eps));
    o.insert("states".into(), strings(est.labels()));
    o.insert("inputs".into(), strings(est.input_names()));
    o.insert(
        "initial".into(),
        strings(est.initial_states().iter().map(|(_, s)| est.label(*s))),
    );
    o.insert("secret".into(), Value::Array(Vec::new()));
    o.insert("output_dim".into(), Value::from(output_dim));
    let mut outputs = Map::new();
    for s in 0..est.num_states() {
        let y = base_outputs(est.state(s).x);
        outputs.insert(
            est.label(s).to_string(),
            Value::Array(y.iter().map(scalar_value).collect()),
        );
    }
    o.insert("outputs".into(), Value::Object(outputs));
    let mut kernel = Vec::new();
    for s in 0..est.num_states() {
        for u in 0..est.num_inputs() {
            for (t, p) in est.row(s, u) {
                let mut m = Map::new();
                m.insert("from".into(), str_value(est.label(s)));
                m.insert("input".into(), str_value(est.input_name(u)));
                m.insert("to".into(), str_value(est.label(*t)));
                m.insert("p".into(), scalar_value(p));
                kernel.push(Value::Object(m));
            }
        }
    }
    o.insert("kernel".into(), Value::Array(kernel));
    o.insert(
        "bad".into(),
        strings(est.bad_states().map(|s| est.label(s))),
    );
    to_canonical_string(&Value::Object(o))
}

/// Estimator file read back as a plain gMDP plus its bad labels.
pub fn parse_estimator<S: Scalar>(text: &str) -> Result<(GmdpDocument<S>, Vec<String>)> {
    let mut root = parse_json(text)?;
    let o = root
        .as_object_mut()
        .ok_or_else(|| Error::Parse("estimator: expected an object".into()))?;
    let bad = string_list(
        o.get("bad")
            .ok_or_else(|| Error::Parse("missing key `bad`".into()))?,
        "bad",
    )?;
    o.remove("bad");
    o.remove("kind");
    o.remove("eps");
    let file = parse_gmdp::<S>(&root.to_string())?;
    Ok((file.document, bad))
}

// ---- relations ----

pub fn parse_relation(text: &str) -> Result<Vec<(String, String)>> {
    let root = parse_json(text)?;
    let o = as_object(&root, "relation")?;
    let pairs = field(o, "pairs")?
        .as_array()
        .ok_or_else(|| Error::Parse("pairs: expected an array".into()))?;
    pairs
        .iter()
        .map(|p| match p.as_array().map(Vec::as_slice) {
            Some([Value::String(a), Value::String(b)]) => Ok((a.clone(), b.clone())),
            _ => Err(Error::Parse(format!(
                "pairs: expected [stateA, stateB], got {p}"
            ))),
        })
        .collect()
}

pub fn write_relation<A: AsRef<str>, B: AsRef<str>>(pairs: &[(A, B)]) -> String {
    let arr = pairs
        .iter()
        .map(|(a, b)| Value::Array(vec![str_value(a.as_ref()), str_value(b.as_ref())]))
        .collect();
    let mut o = Map::new();
    o.insert("pairs".into(), Value::Array(arr));
    to_canonical_string(&Value::Object(o))
}

// ---- continuous systems ----

#[derive(Debug, Clone)]
pub struct SystemFile<S> {
    pub system: ContinuousAffineSystem,
    pub certificate: Option<DeltaIssCertificate<S>>,
}

fn parse_interval(v: &Value, what: &str) -> Result<Interval> {
    match v.as_array().map(Vec::as_slice) {
        Some([lo, hi]) => Ok(Interval::new(parse_f64(lo, what)?, parse_f64(hi, what)?)),
        _ => Err(Error::Parse(format!("{what}: expected [lo, hi]"))),
    }
}

fn interval_value(i: &Interval) -> Value {
    Value::Array(vec![f64_value(i.lo), f64_value(i.hi)])
}

pub fn parse_system<S: Scalar>(text: &str) -> Result<SystemFile<S>> {
    let root = parse_json(text)?;
    let o = as_object(&root, "system")?;
    let num = |k: &str| parse_f64(field(o, k)?, k);
    let secret = field(o, "secret_domain")?
        .as_array()
        .ok_or_else(|| Error::Parse("secret_domain: expected an array of intervals".into()))?
        .iter()
        .map(|v| parse_interval(v, "secret_domain"))
        .collect::<Result<Vec<_>>>()?;
    let input_domain = match field(o, "input_domain")? {
        Value::Array(values) => InputDomain::Finite(
            values
                .iter()
                .map(|v| parse_f64(v, "input_domain"))
                .collect::<Result<_>>()?,
        ),
        Value::Object(io) => InputDomain::Interval(parse_interval(
            field(io, "interval")?,
            "input_domain.interval",
        )?),
        _ => {
            return Err(Error::Parse(
                "input_domain: expected an array or {\"interval\": [lo, hi]}".into(),
            ))
        }
    };
    let system = ContinuousAffineSystem {
        a: num("a")?,
        b: num("b")?,
        c: num("c")?,
        d: num("d")?,
        state_domain: parse_interval(field(o, "state_domain")?, "state_domain")?,
        initial_domain: parse_interval(field(o, "initial_domain")?, "initial_domain")?,
        secret_domain: secret,
        input_domain,
    };
    let certificate = match o.get("certificate") {
        None => None,
        Some(c) => {
            let co = as_object(c, "certificate")?;
            let slope = |k: &str| parse_scalar::<S>(field(co, k)?, &format!("certificate.{k}"));
            Some(DeltaIssCertificate {
                alpha_lo: slope("alpha_lo")?,
                alpha_hi: slope("alpha_hi")?,
                kappa: slope("kappa")?,
                rho: slope("rho")?,
                gamma: slope("gamma")?,
                ell: slope("ell")?,
            })
        }
    };
    Ok(SystemFile {
        system,
        certificate,
    })
}

pub fn write_system<S: Scalar>(file: &SystemFile<S>) -> String {
    let s = &file.system;
    let mut o = Map::new();
    for (k, v) in [("a", s.a), ("b", s.b), ("c", s.c), ("d", s.d)] {
        o.insert(k.into(), f64_value(v));
    }
    o.insert("state_domain".into(), interval_value(&s.state_domain));
    o.insert("initial_domain".into(), interval_value(&s.initial_domain));
    o.insert(
        "secret_domain".into(),
        Value::Array(s.secret_domain.iter().map(interval_value).collect()),
    );
    let input = match &s.input_domain {
        InputDomain::Finite(v) => Value::Array(v.iter().map(|x| f64_value(*x)).collect()),
        InputDomain::Interval(i) => {
            let mut io = Map::new();
            io.insert("interval".into(), interval_value(i));
            Value::Object(io)
        }
    };
    o.insert("input_domain".into(), input);
    if let Some(c) = &file.certificate {
        let mut co = Map::new();
        co.insert("alpha_lo".into(), scalar_value(&c.alpha_lo));
        co.insert("alpha_hi".into(), scalar_value(&c.alpha_hi));
        co.insert("kappa".into(), scalar_value(&c.kappa));
        co.insert("rho".into(), scalar_value(&c.rho));
        co.insert("gamma".into(), scalar_value(&c.gamma));
        co.insert("ell".into(), scalar_value(&c.ell));
        o.insert("certificate".into(), Value::Object(co));
    }
    to_canonical_string(&Value::Object(o))
}

pub fn feasibility_value<S: Scalar>(r: &FeasibilityReport<S>) -> Value {
    let mut o = Map::new();
    o.insert("gamma_argument".into(), scalar_value(&r.gamma_argument));
    o.insert(
        "eta_max".into(),
        r.eta_max.as_ref().map_or(Value::Null, scalar_value),
    );
    o.insert("eta_ok".into(), Value::Bool(r.eta_ok));
    o.insert(
        "theta_min".into(),
        r.theta_min.as_ref().map_or(Value::Null, scalar_value),
    );
    o.insert("theta_ok".into(), Value::Bool(r.theta_ok));
    o.insert("feasible".into(), Value::Bool(r.feasible));
    o.insert("passes".into(), Value::Bool(r.passes));
    Value::Object(o)
}

pub fn abstraction_meta_value(abs: &Abstraction, feasibility: Option<Value>) -> Value {
    let m = &abs.meta;
    let mut o = Map::new();
    o.insert("eta".into(), f64_value(m.eta));
    o.insert("theta".into(), f64_value(m.theta));
    o.insert("mu".into(), f64_value(m.mu));
    o.insert("eps".into(), f64_value(m.eps));
    o.insert("delta".into(), f64_value(m.delta));
    o.insert(
        "relation_radius".into(),
        m.relation_radius.map_or(Value::Null, f64_value),
    );
    o.insert(
        "cells".into(),
        Value::Array(m.cells.iter().map(interval_value).collect()),
    );
    let clamped = m
        .clamped
        .iter()
        .map(|c| {
            let mut e = Map::new();
            e.insert("state".into(), str_value(&c.state));
            e.insert("input".into(), str_value(&c.input));
            e.insert("mass".into(), f64_value(c.mass));
            Value::Object(e)
        })
        .collect();
    o.insert("clamped_mass".into(), Value::Array(clamped));
    if let Some(f) = feasibility {
        o.insert("feasibility".into(), f);
    }
    o.insert("warnings".into(), strings(&m.warnings));
    Value::Object(o)
}

pub fn write_abstraction(abs: &Abstraction, feasibility: Option<Value>) -> String {
    let meta = abstraction_meta_value(abs, feasibility);
    to_canonical_string(&gmdp_value(&abs.model.to_document(), Some(&meta)))
}

// ---- reports ----

pub fn verdict_value<S: Scalar>(v: &OpacityVerdict<S>, prov: &Provenance) -> Value {
    let mut o = Map::new();
    provenance_fields(prov, &mut o);
    o.insert("kind".into(), str_value(v.kind.as_str()));
    o.insert("eps".into(), scalar_value(&v.eps));
    o.insert("lambda".into(), scalar_value(&v.lambda));
    o.insert("horizon".into(), Value::from(v.horizon));
    o.insert("opaque".into(), Value::Bool(v.opaque));
    o.insert(
        "witness".into(),
        v.witness_name().map_or(Value::Null, str_value),
    );
    o.insert("margin".into(), scalar_value(&v.margin));
    let mut per = Map::new();
    for (x0, p) in &v.per_initial {
        per.insert(v.base_state_names[*x0].clone(), scalar_value(p));
    }
    o.insert("per_initial".into(), Value::Object(per));
    let mut p = Map::new();
    for (label, value) in v.estimator_labels.iter().zip(&v.p) {
        p.insert(label.clone(), scalar_value(value));
    }
    o.insert("p".into(), Value::Object(p));
    o.insert("estimator_states".into(), Value::from(v.estimator_states));
    o.insert(
        "initial_assumption_holds".into(),
        Value::Bool(v.initial_assumption_holds),
    );
    Value::Object(o)
}

pub fn write_verdict<S: Scalar>(v: &OpacityVerdict<S>, prov: &Provenance) -> String {
    to_canonical_string(&verdict_value(v, prov))
}

/// Fields of a verdict report needed to transfer it.
#[derive(Debug, Clone, PartialEq)]
pub struct VerdictSummary<S> {
    pub kind: EstimatorKind,
    pub eps: S,
    pub lambda: S,
    pub horizon: usize,
    pub opaque: bool,
}

pub fn parse_verdict<S: Scalar>(text: &str) -> Result<VerdictSummary<S>> {
    let root = parse_json(text)?;
    let o = as_object(&root, "verdict")?;
    let kind = field(o, "kind")?
        .as_str()
        .ok_or_else(|| Error::Parse("kind: expected a string".into()))?;
    Ok(VerdictSummary {
        kind: kind.parse()?,
        eps: parse_scalar(field(o, "eps")?, "eps")?,
        lambda: parse_scalar(field(o, "lambda")?, "lambda")?,
        horizon: field(o, "horizon")?
            .as_u64()
            .ok_or_else(|| Error::Parse("horizon: expected a non-negative integer".into()))?
            as usize,
        opaque: field(o, "opaque")?
            .as_bool()
            .ok_or_else(|| Error::Parse("opaque: expected a boolean".into()))?,
    })
}

pub fn write_relation_report<S: Scalar>(r: &RelationCheckReport<S>, prov: &Provenance) -> String {
    let mut o = Map::new();
    provenance_fields(prov, &mut o);
    o.insert("kind".into(), str_value(r.kind.as_str()));
    o.insert("eps".into(), scalar_value(&r.eps));
    o.insert("delta".into(), scalar_value(&r.delta));
    o.insert("holds".into(), Value::Bool(r.holds));
    let failures = r
        .failures
        .iter()
        .map(|f| {
            let mut m = Map::new();
            m.insert("condition".into(), str_value(f.condition.id()));
            m.insert(
                "state_a".into(),
                f.state_a.as_deref().map_or(Value::Null, str_value),
            );
            m.insert(
                "state_b".into(),
                f.state_b.as_deref().map_or(Value::Null, str_value),
            );
            m.insert(
                "input".into(),
                f.input.as_deref().map_or(Value::Null, str_value),
            );
            m.insert(
                "achieved".into(),
                f.achieved.as_ref().map_or(Value::Null, scalar_value),
            );
            m.insert(
                "required".into(),
                f.required.as_ref().map_or(Value::Null, scalar_value),
            );
            Value::Object(m)
        })
        .collect();
    o.insert("failures".into(), Value::Array(failures));
    o.insert(
        "interpreted".into(),
        strings(r.interpreted.iter().map(|c| c.id())),
    );
    to_canonical_string(&Value::Object(o))
}

pub fn write_transfer<S: Scalar>(t: &GuaranteeTransfer<S>, prov: &Provenance) -> String {
    let mut o = Map::new();
    provenance_fields(prov, &mut o);
    o.insert("kind".into(), str_value(t.kind.as_str()));
    o.insert("eps_abstract".into(), scalar_value(&t.eps_abstract));
    o.insert("lambda_abstract".into(), scalar_value(&t.lambda_abstract));
    o.insert("eps_rel".into(), scalar_value(&t.eps_rel));
    o.insert("delta".into(), scalar_value(&t.delta));
    o.insert("horizon".into(), Value::from(t.horizon));
    o.insert("gamma_delta".into(), scalar_value(&t.gamma_delta));
    o.insert("eps_concrete".into(), scalar_value(&t.eps_concrete));
    o.insert("lambda_concrete".into(), scalar_value(&t.lambda_concrete));
    to_canonical_string(&Value::Object(o))
}

pub struct EstimateContext<'a> {
    pub kind: EstimatorKind,
    pub eps: String,
    pub x0: &'a str,
    pub horizon: usize,
    pub mode: &'a str,
}

pub fn write_estimate(e: &Estimate, ctx: &EstimateContext<'_>, prov: &Provenance) -> String {
    let mut o = Map::new();
    provenance_fields(prov, &mut o);
    o.insert("kind".into(), str_value(ctx.kind.as_str()));
    o.insert(
        "eps".into(),
        Number::from_str(&ctx.eps).map_or_else(|_| str_value(&ctx.eps), Value::Number),
    );
    o.insert("x0".into(), str_value(ctx.x0));
    o.insert("horizon".into(), Value::from(ctx.horizon));
    o.insert("mode".into(), str_value(ctx.mode));
    o.insert("N".into(), Value::from(e.samples));
    o.insert("seed".into(), Value::from(e.seed));
    o.insert("confidence".into(), f64_value(e.confidence));
    o.insert("hits".into(), Value::from(e.hits));
    o.insert("p_hat".into(), f64_value(e.p_hat));
    o.insert("ci_lo".into(), f64_value(e.ci_lo));
    o.insert("ci_hi".into(), f64_value(e.ci_hi));
    to_canonical_string(&Value::Object(o))
}

/// `step,hits` rows of the first-hit histogram.
pub fn histogram_csv(e: &Estimate) -> String {
    let mut out = String::from("step,hits\n");
    for (k, h) in e.histogram.iter().enumerate() {
        out.push_str(&format!("{k},{h}\n"));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;
    use num_rational::BigRational;

    #[test]
    fn gmdp_round_trip_is_byte_identical() {
        let text = write_gmdp(&fixtures::five_state_document::<f64>());
        let again = write_gmdp(&parse_gmdp::<f64>(&text).unwrap().document);
        assert_eq!(text, again);
        let exact = write_gmdp(&parse_gmdp::<BigRational>(&text).unwrap().document);
        assert_eq!(text, exact);
    }

    #[test]
    fn literals_survive_verbatim() {
        let text = write_gmdp(&fixtures::five_state_document::<BigRational>());
        assert!(text.contains("\"p\": 0.1}"));
        assert!(text.contains("\"A\": [0.1]"));
        let third = BigRational::new(1.into(), 3.into());
        assert_eq!(scalar_value(&third), Value::String("1/3".into()));
        assert_eq!(
            parse_scalar::<BigRational>(&Value::String("1/3".into()), "x").unwrap(),
            third
        );
    }

    #[test]
    fn malformed_documents() {
        assert!(matches!(parse_gmdp::<f64>("{"), Err(Error::Parse(_))));
        assert!(matches!(
            parse_gmdp::<f64>("{\"states\": []}"),
            Err(Error::Parse(_))
        ));
        let text =
            write_gmdp(&fixtures::five_state_document::<f64>()).replace("\"p\": 0.1}", "\"p\": \"x\"}");
        assert!(matches!(parse_gmdp::<f64>(&text), Err(Error::Parse(_))));
    }

    #[test]
    fn relation_and_system_round_trip() {
        let rel = write_relation(&fixtures::RELATION_PAIRS);
        let parsed = parse_relation(&rel).unwrap();
        assert_eq!(write_relation(&parsed), rel);
        let sys = SystemFile {
            system: fixtures::road_traffic_system(),
            certificate: Some(fixtures::road_traffic_certificate::<BigRational>()),
        };
        let text = write_system(&sys);
        let back = parse_system::<BigRational>(&text).unwrap();
        assert_eq!(back.system, sys.system);
        assert_eq!(back.certificate, sys.certificate);
        assert_eq!(write_system(&back), text);
    }

    #[test]
    fn canonical_layout() {
        let v: Value =
            serde_json::from_str(r#"{"a": [1, 2], "b": {"c": [0.5]}, "d": [{"x": 1}]}"#).unwrap();
        assert_eq!(
            to_canonical_string(&v),
            "{\n  \"a\": [1, 2],\n  \"b\": {\"c\": [0.5]},\n  \"d\": [{\"x\": 1}]\n}\n"
        );
    }
}
