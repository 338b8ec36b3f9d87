use std::fs;
use std::path::{Path, PathBuf};

use opaquemdp::format::{
    feasibility_value, histogram_csv, parse_gmdp, parse_relation, parse_system, parse_verdict,
    write_abstraction, write_estimate, write_estimator, write_relation_report, write_transfer,
    write_verdict, EstimateContext, Provenance,
};
use opaquemdp::{
    build_abstraction, build_current_estimator, build_initial_estimator, check_cursop_params,
    check_initsop_params, check_relation, estimate_violation, transfer_parameters, verify_opacity,
    AbstractionParams, BigRational, EstimatorKind, FiniteGmdp, InputPlan, Scalar, SimulationConfig,
    StateRelation,
};

use crate::{Cli, Command, Kind};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error(transparent)]
    Core(#[from] opaquemdp::Error),
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("{}: {source}", path.display())]
    File {
        path: PathBuf,
        source: opaquemdp::Error,
    },
    #[error("--{flag}: `{value}` is not a number")]
    Number { flag: &'static str, value: String },
}

impl CliError {
    /// 1 when the inputs are well-formed but a hypothesis of the requested
    /// operation does not hold, 2 otherwise.
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Core(
                opaquemdp::Error::HypothesisViolation { .. } | opaquemdp::Error::AbstractNotOpaque,
            ) => 1,
            _ => 2,
        }
    }
}

pub type CliResult<T> = Result<T, CliError>;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Outcome {
    Holds,
    Fails,
}

impl Outcome {
    fn from_bool(ok: bool) -> Self {
        if ok {
            Outcome::Holds
        } else {
            Outcome::Fails
        }
    }
}

fn read(path: &Path) -> CliResult<String> {
    fs::read_to_string(path).map_err(|source| CliError::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn write(path: &Path, text: &str) -> CliResult<()> {
    fs::write(path, text).map_err(|source| CliError::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn in_file<T>(path: &Path, r: opaquemdp::Result<T>) -> CliResult<T> {
    r.map_err(|source| CliError::File {
        path: path.to_path_buf(),
        source,
    })
}

fn number<S: Scalar>(flag: &'static str, value: &str) -> CliResult<S> {
    S::parse_literal(value.trim()).ok_or_else(|| CliError::Number {
        flag,
        value: value.to_string(),
    })
}

fn load_model<S: Scalar>(path: &Path) -> CliResult<FiniteGmdp<S>> {
    let text = read(path)?;
    let file = in_file(path, parse_gmdp::<S>(&text))?;
    in_file(path, file.document.into_model())
}

pub fn run(cli: &Cli, invocation: Vec<String>) -> CliResult<Outcome> {
    let prov = Provenance::new(env!("CARGO_PKG_VERSION"), invocation);
    if let Command::Abstract { .. } = cli.command {
        return abstract_cmd(&cli.command);
    }
    if cli.exact {
        run_with::<BigRational>(&cli.command, &prov)
    } else {
        run_with::<f64>(&cli.command, &prov)
    }
}

fn run_with<S: Scalar>(cmd: &Command, prov: &Provenance) -> CliResult<Outcome> {
    match cmd {
        Command::Validate { model } => validate::<S>(model),
        Command::Estimator {
            model,
            kind,
            eps,
            out,
        } => estimator::<S>(model, *kind, eps, out),
        Command::Verify {
            model,
            kind,
            eps,
            lambda,
            horizon,
            out,
        } => {
            let m = load_model::<S>(model)?;
            let eps: S = number("eps", eps)?;
            let lambda: S = number("lambda", lambda)?;
            let v = verify_opacity(&m, (*kind).into(), &eps, &lambda, *horizon)?;
            println!(
                "{}: ({}, {})-approximate {}-state opacity within horizon {}",
                if v.opaque { "opaque" } else { "NOT opaque" },
                v.eps.to_literal(),
                v.lambda.to_literal(),
                v.kind.as_str(),
                v.horizon
            );
            for (x0, p) in &v.per_initial {
                println!("  P_max[{}] = {}", v.base_state_names[*x0], p.to_literal());
            }
            if let Some(w) = v.witness_name() {
                println!("  witness {w}, margin {}", v.margin.to_literal());
            }
            println!("  estimator states: {}", v.estimator_states);
            if !v.initial_assumption_holds {
                println!("  note: every initial state has an indistinguishable ball inside the secret set");
            }
            if let Some(path) = &out.out {
                write(path, &write_verdict(&v, prov))?;
            }
            Ok(Outcome::from_bool(v.opaque))
        }
        Command::Relate {
            model_a,
            model_b,
            relation,
            kind,
            eps,
            delta,
            out,
        } => {
            let a = load_model::<S>(model_a)?;
            let b = load_model::<S>(model_b)?;
            let pairs = in_file(relation, parse_relation(&read(relation)?))?;
            let rel = in_file(relation, StateRelation::from_names(&a, &b, &pairs))?;
            let eps: S = number("eps", eps)?;
            let delta: S = number("delta", delta)?;
            let r = check_relation((*kind).into(), &a, &b, &rel, &eps, &delta)?;
            println!(
                "{} {}: relation {} at eps = {}, delta = {}",
                r.kind.as_str(),
                if r.holds { "holds" } else { "FAILS" },
                relation.display(),
                r.eps.to_literal(),
                r.delta.to_literal()
            );
            for f in &r.failures {
                let mut line = format!("  condition {}", f.condition.id());
                for (label, v) in [("a", &f.state_a), ("b", &f.state_b), ("input", &f.input)] {
                    if let Some(v) = v {
                        line.push_str(&format!(" {label}={v}"));
                    }
                }
                if let (Some(got), Some(need)) = (&f.achieved, &f.required) {
                    line.push_str(&format!(
                        " achieved {} < required {}",
                        got.to_literal(),
                        need.to_literal()
                    ));
                }
                println!("{line}");
            }
            if let Some(path) = &out.out {
                write(path, &write_relation_report(&r, prov))?;
            }
            Ok(Outcome::from_bool(r.holds))
        }
        Command::Transfer {
            verdict,
            eps_rel,
            delta,
            out,
        } => {
            let v = in_file(verdict, parse_verdict::<S>(&read(verdict)?))?;
            if !v.opaque {
                return Err(opaquemdp::Error::AbstractNotOpaque.into());
            }
            let eps_rel: S = number("eps-rel", eps_rel)?;
            let delta: S = number("delta", delta)?;
            let t = transfer_parameters(v.kind, &v.eps, &v.lambda, &eps_rel, &delta, v.horizon)?;
            println!(
                "concrete system is ({}, {})-approximate {}-state opaque within horizon {} (gamma_delta = {})",
                t.eps_concrete.to_literal(),
                t.lambda_concrete.to_literal(),
                t.kind.as_str(),
                t.horizon,
                t.gamma_delta.to_literal()
            );
            if let Some(path) = &out.out {
                write(path, &write_transfer(&t, prov))?;
            }
            Ok(Outcome::Holds)
        }
        Command::Simulate {
            model,
            kind,
            eps,
            x0,
            horizon,
            samples,
            seed,
            inputs,
            confidence,
            histogram,
            out,
        } => {
            let m = load_model::<S>(model)?;
            let eps: S = number("eps", eps)?;
            let start = m.state_id(x0)?;
            let plan = match inputs {
                Some(names) => InputPlan::Sequence(
                    names
                        .iter()
                        .map(|n| m.input_id(n))
                        .collect::<Result<_, _>>()?,
                ),
                None => InputPlan::WorstCase,
            };
            let mode = if matches!(plan, InputPlan::WorstCase) {
                "worst-case"
            } else {
                "sequence"
            };
            let mut config = SimulationConfig::new(*samples, *horizon, plan, *seed);
            config.confidence = *confidence;
            let kind: EstimatorKind = (*kind).into();
            let e = estimate_violation(&m, kind, &eps, start, &config)?;
            println!(
                "p_hat = {} ({} of {} runs), {}% interval [{}, {}], seed {}",
                e.p_hat,
                e.hits,
                e.samples,
                e.confidence * 100.0,
                e.ci_lo,
                e.ci_hi,
                e.seed
            );
            let ctx = EstimateContext {
                kind,
                eps: eps.to_literal(),
                x0,
                horizon: *horizon,
                mode,
            };
            if let Some(path) = &out.out {
                write(path, &write_estimate(&e, &ctx, prov))?;
            }
            if let Some(path) = histogram {
                write(path, &histogram_csv(&e))?;
            }
            Ok(Outcome::Holds)
        }
        Command::Abstract { .. } => unreachable!("dispatched before scalar selection"),
    }
}

fn validate<S: Scalar>(model: &Path) -> CliResult<Outcome> {
    let file = in_file(model, parse_gmdp::<S>(&read(model)?))?;
    let report = file.document.validate();
    if report.is_valid() {
        println!(
            "{}: valid ({} states, {} inputs, {} transitions)",
            model.display(),
            file.document.states.len(),
            file.document.inputs.len(),
            file.document.kernel.len()
        );
        Ok(Outcome::Holds)
    } else {
        println!("{}: invalid", model.display());
        for v in &report.violations {
            println!("  {v}");
        }
        Ok(Outcome::Fails)
    }
}

fn estimator<S: Scalar>(model: &Path, kind: Kind, eps: &str, out: &Path) -> CliResult<Outcome> {
    let m = load_model::<S>(model)?;
    let eps: S = number("eps", eps)?;
    let outputs = |x: usize| m.output(x).to_vec();
    let (text, states, initial, bad) = match EstimatorKind::from(kind) {
        EstimatorKind::Initial => {
            let est = build_initial_estimator(&m, &eps)?;
            let text = write_estimator(&est, &outputs, m.output_dim(), &eps);
            (
                text,
                est.num_states(),
                est.initial_states().len(),
                est.bad_states().count(),
            )
        }
        EstimatorKind::Current => {
            let est = build_current_estimator(&m, &eps)?;
            let text = write_estimator(&est, &outputs, m.output_dim(), &eps);
            (
                text,
                est.num_states(),
                est.initial_states().len(),
                est.bad_states().count(),
            )
        }
    };
    write(out, &text)?;
    println!(
        "{}-state estimator: {states} states, {initial} initial, {bad} bad -> {}",
        EstimatorKind::from(kind).as_str(),
        out.display()
    );
    Ok(Outcome::Holds)
}

/// Masses are computed in f64; the feasibility check against the
/// certificate is always exact.
fn abstract_cmd(cmd: &Command) -> CliResult<Outcome> {
    let Command::Abstract {
        system,
        eta,
        theta,
        mu,
        eps,
        delta,
        kind,
        out,
    } = cmd
    else {
        unreachable!()
    };
    let text = read(system)?;
    let file = in_file(system, parse_system::<f64>(&text))?;
    let exact = in_file(system, parse_system::<BigRational>(&text))?;
    let params = AbstractionParams {
        eta: number::<f64>("eta", eta)?,
        theta: number("theta", theta)?,
        mu: number("mu", mu)?,
        eps: number("eps", eps)?,
        delta: number("delta", delta)?,
    };
    let feasibility = match &exact.certificate {
        Some(cert) => {
            let p = AbstractionParams {
                eta: number::<BigRational>("eta", eta)?,
                theta: number("theta", theta)?,
                mu: number("mu", mu)?,
                eps: number("eps", eps)?,
                delta: number("delta", delta)?,
            };
            Some(match kind {
                Kind::Initial => check_initsop_params(cert, &p)?,
                Kind::Current => check_cursop_params(cert, &p)?,
            })
        }
        None => None,
    };
    let abs = build_abstraction(&file.system, &params, file.certificate.as_ref())?;
    write(
        out,
        &write_abstraction(&abs, feasibility.as_ref().map(feasibility_value)),
    )?;
    let m = &abs.model;
    let names = |ids: &mut dyn Iterator<Item = usize>| {
        ids.map(|x| m.state_name(x).to_string()).collect::<Vec<_>>()
    };
    println!(
        "{} cells, {} inputs, secret {{{}}}, initial {{{}}} -> {}",
        m.num_states(),
        m.num_inputs(),
        names(&mut m.secret_states()).join(", "),
        names(&mut m.initial_states().iter().copied()).join(", "),
        out.display()
    );
    for w in &abs.meta.warnings {
        println!("  warning: {w}");
    }
    let Some(f) = feasibility else {
        println!("  no certificate: feasibility not checked");
        return Ok(Outcome::Holds);
    };
    println!(
        "  eta_max = {}, eta {}; {}",
        f.eta_max
            .as_ref()
            .map_or("none (infeasible)".to_string(), |v| v.to_literal()),
        if f.eta_ok { "ok" } else { "too large" },
        match &f.theta_min {
            Some(t) => format!(
                "theta_min = {}, theta {}",
                t.to_literal(),
                if f.theta_ok { "ok" } else { "too small" }
            ),
            None => "theta unconstrained".to_string(),
        }
    );
    Ok(Outcome::from_bool(f.passes))
}
