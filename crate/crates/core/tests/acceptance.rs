//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any criterion fails. Runs without a libtest harness.

mod common;

use std::process::ExitCode;
use std::time::{Duration, Instant};

use common::{
    q, random_distribution, random_exact, random_f64, simpson_normal_mass, subset_oracle,
};
use num_rational::BigRational;
use num_traits::One;
use opaquemdp::abstraction::{gaussian_cell_mass, kernel_row, Grid};
use opaquemdp::coupling::max_coupling_mass;
use opaquemdp::relations::gamma_delta;
use opaquemdp::scalar::convert;
use opaquemdp::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use statrs::distribution::{ContinuousCDF, Normal};

type Check = Result<String, String>;

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn c1_initial_golden() -> Check {
    let m = fixtures::five_state::<BigRational>();
    let est = build_initial_estimator(&m, &q(0, 1)).map_err(|e| e.to_string())?;
    ensure(est.num_states() == 9, || {
        format!("{} estimator states", est.num_states())
    })?;
    ensure(est.initial_states().len() == 2, || {
        "initial set size".into()
    })?;
    ensure(est.bad_states().count() == 3, || {
        format!("{} bad states", est.bad_states().count())
    })?;
    let a = m.state_id("A").unwrap();
    let b = m.state_id("B").unwrap();
    for n in 1..=10 {
        let r = value_iteration(&est, n);
        ensure(
            r.value_for(a) == Some(&q(1, 10)) && r.value_for(b) == Some(&q(0, 1)),
            || format!("n = {n}: per_initial {:?}", r.per_initial),
        )?;
    }
    let f = fixtures::five_state::<f64>();
    let r = value_iteration(&build_initial_estimator(&f, &0.0).unwrap(), 3);
    ensure(
        (r.value_for(a).unwrap() - 0.1).abs() <= 1e-12 && r.value_for(b).unwrap().abs() <= 1e-12,
        || "f64 per_initial off by more than 1e-12".into(),
    )?;
    let v = verify_opacity(&m, EstimatorKind::Initial, &q(0, 1), &q(9, 10), 5)
        .map_err(|e| e.to_string())?;
    ensure(v.opaque, || "not (0, 0.9)-initial-state opaque".into())?;
    Ok("9 states, |X_I0| = 2, 3 bad, A -> 0.1, B -> 0, (0, 0.9) opaque".into())
}

fn c2_current_golden() -> Check {
    let m = fixtures::five_state::<BigRational>();
    let b = m.state_id("B").unwrap();
    for n in 1..=10 {
        let v = verify_opacity(&m, EstimatorKind::Current, &q(0, 1), &q(8, 10), n)
            .map_err(|e| e.to_string())?;
        ensure(v.opaque, || format!("n = {n}: not opaque"))?;
        ensure(v.value_for(b) == Some(&q(2, 10)), || {
            format!("n = {n}: B -> {:?}", v.value_for(b))
        })?;
    }
    let f = fixtures::five_state::<f64>();
    let v = verify_opacity(&f, EstimatorKind::Current, &0.0, &0.8, 10).unwrap();
    ensure(v.opaque, || "f64 verdict differs".into())?;
    Ok("(0, 0.8)-current-state opaque for n in 1..=10, B -> 0.2".into())
}

fn c3_oracle_equivalence() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(0x0c3);
    let models = 40;
    let mut comparisons = 0usize;
    let mut open_loop_gaps = 0usize;
    for i in 0..models {
        let m = random_f64(&mut rng, 6, 3);
        let eps = if rng.random_bool(0.5) { 0.0 } else { 0.1 };
        let n = rng.random_range(0..=5);
        for kind in [EstimatorKind::Initial, EstimatorKind::Current] {
            let check = |vi: &[(usize, f64)],
                         bf: &dyn Fn(usize) -> Result<f64>,
                         ol: &dyn Fn(usize) -> Result<f64>| {
                let mut gaps = 0;
                for (x0, v) in vi {
                    let brute = bf(*x0).map_err(|e| e.to_string())?;
                    if (brute - v).abs() > 1e-9 {
                        return Err(format!("model {i} {kind:?} n={n} x0={x0}: value iteration {v}, brute force {brute}"));
                    }
                    if (ol(*x0).map_err(|e| e.to_string())? - v).abs() > 1e-9 {
                        gaps += 1;
                    }
                }
                Ok((vi.len(), gaps))
            };
            let (k, g) = match kind {
                EstimatorKind::Initial => {
                    let est = build_initial_estimator(&m, &eps).unwrap();
                    let r = value_iteration(&est, n);
                    check(
                        &r.per_initial,
                        &|x0| brute_force_max_violation(&est, x0, n),
                        &|x0| open_loop_max_violation(&est, x0, n),
                    )?
                }
                EstimatorKind::Current => {
                    let est = build_current_estimator(&m, &eps).unwrap();
                    let r = value_iteration(&est, n);
                    check(
                        &r.per_initial,
                        &|x0| brute_force_max_violation(&est, x0, n),
                        &|x0| open_loop_max_violation(&est, x0, n),
                    )?
                }
            };
            comparisons += k;
            open_loop_gaps += g;
        }
    }
    Ok(format!(
        "{models} models, {comparisons} initial states x kinds agree within 1e-9 \
         ({open_loop_gaps} where fixed input sequences reach less)"
    ))
}

fn c4_monte_carlo() -> Check {
    let m = fixtures::five_state::<f64>();
    let a = m.state_id("A").unwrap();
    let n_samples = 100_000;
    let cfg = SimulationConfig::new(n_samples, 3, InputPlan::Sequence(vec![0, 0, 0]), 20_240_601);
    let e =
        estimate_violation(&m, EstimatorKind::Initial, &0.0, a, &cfg).map_err(|e| e.to_string())?;
    let z = Normal::new(0.0, 1.0).unwrap().inverse_cdf(0.9995);
    let half = z * (0.1f64 * 0.9 / n_samples as f64).sqrt();
    ensure((e.p_hat - 0.1).abs() <= half, || {
        format!("p_hat = {} outside 0.1 +/- {half}", e.p_hat)
    })?;
    let empty = fixtures::five_state_no_secret::<f64>();
    let e0 = estimate_violation(&empty, EstimatorKind::Initial, &0.0, a, &cfg)
        .map_err(|e| e.to_string())?;
    ensure(e0.p_hat == 0.0 && e0.hits == 0, || {
        format!("empty secret p_hat = {}", e0.p_hat)
    })?;
    Ok(format!(
        "p_hat = {} in 0.1 +/- {half:.5}, empty secret p_hat = 0",
        e.p_hat
    ))
}

fn c5_coupling() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(0x0c5);
    let mut compared = 0usize;
    for _ in 0..500 {
        let sa = rng.random_range(1..=4);
        let sb = rng.random_range(1..=4);
        let phi = random_distribution(&mut rng, sa, 4);
        let theta = random_distribution(&mut rng, sb, 4);
        let rel: Vec<(usize, usize)> = (0..4)
            .flat_map(|a| (0..4).map(move |b| (a, b)))
            .filter(|_| rng.random_bool(0.35))
            .collect();
        let mut bigger = rel.clone();
        bigger.extend(
            (0..4)
                .flat_map(|a| (0..4).map(move |b| (a, b)))
                .filter(|_| rng.random_bool(0.2)),
        );
        let r = |a: usize, b: usize| rel.contains(&(a, b));
        let r2 = |a: usize, b: usize| bigger.contains(&(a, b));
        let exact = max_coupling_mass(&phi, &theta, r).map_err(|e| e.to_string())?;
        let oracle = subset_oracle(&phi, &theta, r);
        ensure(exact == oracle, || {
            format!("flow {exact} vs oracle {oracle}")
        })?;
        let phi_f: Vec<(usize, f64)> = phi.iter().map(|(i, p)| (*i, convert(p))).collect();
        let theta_f: Vec<(usize, f64)> = theta.iter().map(|(i, p)| (*i, convert(p))).collect();
        let float = max_coupling_mass(&phi_f, &theta_f, r).map_err(|e| e.to_string())?;
        let oracle_f: f64 = convert(&oracle);
        ensure((float - oracle_f).abs() <= 1e-9, || {
            format!("f64 flow {float} vs oracle {oracle_f}")
        })?;
        let wider = max_coupling_mass(&phi, &theta, r2).map_err(|e| e.to_string())?;
        ensure(exact <= wider, || {
            "mass decreased when the relation grew".into()
        })?;
        compared += 1;
    }
    // Successor rows of the shipped fixtures.
    let a = fixtures::relation_concrete::<BigRational>();
    let b = fixtures::relation_abstract::<BigRational>();
    let rel = StateRelation::from_names(&a, &b, &fixtures::RELATION_PAIRS).unwrap();
    for &(x, xh) in rel.pairs() {
        let phi = a.row(x, 0);
        let theta = b.row(xh, 0);
        let related = |s: usize, t: usize| rel.contains(s, t);
        let m = max_coupling_mass(phi, theta, related).map_err(|e| e.to_string())?;
        ensure(m == subset_oracle(phi, theta, related), || {
            "fixture row mismatch".into()
        })?;
        compared += 1;
    }
    let f1 = fixtures::five_state::<BigRational>();
    for x in 0..f1.num_states() {
        for y in 0..f1.num_states() {
            let related = |s: usize, t: usize| f1.within_eps(s, t, &q(5, 100));
            let m = max_coupling_mass(f1.row(x, 0), f1.row(y, 0), related)
                .map_err(|e| e.to_string())?;
            ensure(
                m == subset_oracle(f1.row(x, 0), f1.row(y, 0), related),
                || "five_state row mismatch".into(),
            )?;
            compared += 1;
        }
    }
    Ok(format!(
        "{compared} instances match the subset oracle, monotone in R on 500"
    ))
}

fn c6_relation_example() -> Check {
    let a = fixtures::relation_concrete::<BigRational>();
    let b = fixtures::relation_abstract::<BigRational>();
    let rel = StateRelation::from_names(&a, &b, &fixtures::RELATION_PAIRS).unwrap();
    let r = check_initsop(&a, &b, &rel, &q(1, 10), &q(1, 10)).map_err(|e| e.to_string())?;
    ensure(r.holds, || format!("failures: {:?}", r.failures))?;
    let models = [
        fixtures::five_state::<BigRational>(),
        fixtures::five_state_no_secret(),
        fixtures::single_secret_state(),
        a,
        b,
        fixtures::branching_two_input(),
    ];
    let zero = q(0, 1);
    for m in &models {
        let id = StateRelation::identity(m.num_states());
        let r = check_initsop(m, m, &id, &zero, &zero).map_err(|e| e.to_string())?;
        ensure(r.holds, || {
            format!("identity InitSOP fails: {:?}", r.failures)
        })?;
    }
    // The road abstraction carries float masses; check it in f64.
    let road = road_abstraction()?.model;
    let id = StateRelation::identity(road.num_states());
    let r = check_initsop(&road, &road, &id, &0.0, &0.0).map_err(|e| e.to_string())?;
    ensure(r.holds, || {
        format!(
            "identity InitSOP fails on the road abstraction: {:?}",
            r.failures
        )
    })?;
    Ok(format!(
        "reconstructed relation example holds, identity holds on {} fixtures",
        models.len() + 1
    ))
}

fn road_params() -> AbstractionParams<f64> {
    AbstractionParams {
        eta: 0.5,
        theta: 0.0,
        mu: 0.0,
        eps: 1.0,
        delta: 0.15,
    }
}

fn road_abstraction() -> Result<Abstraction, String> {
    let cert = fixtures::road_traffic_certificate::<f64>();
    build_abstraction(
        &fixtures::road_traffic_system(),
        &road_params(),
        Some(&cert),
    )
    .map_err(|e| e.to_string())
}

fn c7_road_traffic() -> Check {
    let cert = fixtures::road_traffic_certificate::<BigRational>();
    let params = AbstractionParams {
        eta: q(1, 2),
        theta: q(0, 1),
        mu: q(0, 1),
        eps: q(1, 1),
        delta: q(15, 100),
    };
    let feas = check_initsop_params(&cert, &params).map_err(|e| e.to_string())?;
    ensure(feas.eta_max == Some(q(1, 2)) && feas.passes, || {
        format!("eta_max = {:?}", feas.eta_max)
    })?;

    let abs = road_abstraction()?;
    let m = &abs.model;
    ensure(m.num_states() == 6, || {
        format!("{} abstract states", m.num_states())
    })?;
    for x in 0..m.num_states() {
        for u in 0..m.num_inputs() {
            let s: f64 = m.row(x, u).iter().map(|(_, p)| p).sum();
            ensure((s - 1.0).abs() <= 1e-9, || {
                format!("row {x}/{u} sums to {s}")
            })?;
        }
    }
    let already: Vec<bool> = (1..=20)
        .map(|n| verify_opacity(m, EstimatorKind::Initial, &0.05, &1.0, n).map(|v| v.opaque))
        .collect::<Result<_>>()
        .map_err(|e| e.to_string())?;
    ensure(already.iter().all(|o| *o), || {
        format!("abstract verdicts {already:?}")
    })?;

    let keep = q(85, 100);
    for n in 1..=20 {
        let v =
            verify_opacity(m, EstimatorKind::Initial, &0.05, &1.0, n).map_err(|e| e.to_string())?;
        let t = transfer_guarantee(&v, &1.0, &0.15).map_err(|e| e.to_string())?;
        let expected = 0.7225f64.powi(n as i32);
        ensure(
            (t.eps_concrete - 2.05).abs() <= 1e-12 && (t.lambda_concrete - expected).abs() <= 1e-12,
            || format!("n = {n}: ({}, {})", t.eps_concrete, t.lambda_concrete),
        )?;
        let exact = transfer_parameters(
            EstimatorKind::Initial,
            &q(5, 100),
            &BigRational::one(),
            &q(1, 1),
            &q(15, 100),
            n,
        )
        .map_err(|e| e.to_string())?;
        let mut pow = BigRational::one();
        let mut keep_n = BigRational::one();
        for _ in 0..n {
            pow *= q(7225, 10000);
            keep_n *= keep.clone();
        }
        ensure(
            exact.eps_concrete == q(205, 100) && exact.lambda_concrete == pow,
            || format!("exact n = {n}"),
        )?;
        ensure(exact.gamma_delta == BigRational::one() - keep_n, || {
            "gamma_delta".into()
        })?;
    }
    Ok("eta_max = 0.5, 6 stochastic rows, (0.05, 1) opaque for n in 1..=20, transfer (2.05, 0.7225^n)".into())
}

fn c8_properties() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(0x0c8);
    let mut cases = 0usize;

    // ε-ball monotonicity and symmetry.
    for _ in 0..300 {
        let m = random_exact(&mut rng, 6, 2);
        let e1 = q(rng.random_range(0..3), 10);
        let e2 = e1.clone() + q(rng.random_range(0..3), 10);
        for x in 0..m.num_states() {
            let small = m.eps_ball(x, &e1);
            let large = m.eps_ball(x, &e2);
            ensure(
                small.iter().all(|y| large.contains(y)) && small.contains(&x),
                || "ball monotonicity".into(),
            )?;
            for &y in &small {
                ensure(m.eps_ball(y, &e1).contains(&x), || "ball symmetry".into())?;
            }
        }
        cases += 1;
    }

    // Bad sets are closed under transitions in both estimators.
    for _ in 0..150 {
        let m = random_exact(&mut rng, 6, 3);
        let eps = q(rng.random_range(0..2), 10);
        let cur = build_current_estimator(&m, &eps).unwrap();
        for s in cur.bad_states() {
            for u in 0..cur.num_inputs() {
                ensure(cur.row(s, u).iter().all(|(t, _)| cur.is_bad(*t)), || {
                    "current flag not absorbing".into()
                })?;
            }
        }
        let ini = build_initial_estimator(&m, &eps).unwrap();
        for s in ini.bad_states() {
            for u in 0..ini.num_inputs() {
                ensure(ini.row(s, u).iter().all(|(t, _)| ini.is_bad(*t)), || {
                    "initial bad set not closed".into()
                })?;
            }
        }
        cases += 1;
    }

    // Values grow with the horizon; verdicts weaken with λ and with ε.
    for _ in 0..150 {
        let m = random_exact(&mut rng, 5, 3);
        let kind = if rng.random_bool(0.5) {
            EstimatorKind::Initial
        } else {
            EstimatorKind::Current
        };
        let zero = q(0, 1);
        let tenth = q(1, 10);
        let lambda = q(rng.random_range(0..=10), 10);
        let lower = q(rng.random_range(0..=10), 10).min(lambda.clone());
        let mut prev: Option<Vec<(usize, BigRational)>> = None;
        for n in 0..=4 {
            let v = verify_opacity(&m, kind, &zero, &lambda, n).unwrap();
            if let Some(p) = &prev {
                for ((_, a), (_, b)) in p.iter().zip(&v.per_initial) {
                    ensure(a <= b, || "value decreased with the horizon".into())?;
                }
            }
            let w = verify_opacity(&m, kind, &zero, &lower, n).unwrap();
            ensure(!v.opaque || w.opaque, || {
                "opaque at lambda but not at a smaller lambda".into()
            })?;
            let coarse = verify_opacity(&m, kind, &tenth, &lambda, n).unwrap();
            for ((_, a), (_, b)) in v.per_initial.iter().zip(&coarse.per_initial) {
                ensure(b <= a, || format!("{kind:?} value grew with eps"))?;
            }
            prev = Some(v.per_initial);
        }
        cases += 1;
    }

    // Transfer algebra.
    for _ in 0..300 {
        let n = rng.random_range(1..=6);
        let d1 = q(rng.random_range(0..=20), 100);
        let d2 = d1.clone() + q(rng.random_range(1..=5), 100);
        let gamma2 = gamma_delta(&d2, n);
        let lambda = gamma2.clone()
            + (BigRational::one() - gamma2.clone()) * q(rng.random_range(1..=10), 10);
        let ea = q(rng.random_range(0..=10), 100);
        let er = q(rng.random_range(0..=10), 10);
        let t1 = transfer_parameters(EstimatorKind::Initial, &ea, &lambda, &er, &d1, n).unwrap();
        let t2 = transfer_parameters(EstimatorKind::Initial, &ea, &lambda, &er, &d2, n).unwrap();
        ensure(
            t1.lambda_concrete <= lambda && t2.lambda_concrete <= lambda,
            || "lambda grew".into(),
        )?;
        ensure(
            t1.eps_concrete == ea.clone() + er.clone() + er.clone(),
            || "eps formula".into(),
        )?;
        ensure(t2.lambda_concrete < t1.lambda_concrete, || {
            "not strictly decreasing in delta".into()
        })?;
        cases += 1;
    }

    // Abstraction rows stay stochastic; halving cells conserves mass.
    let base = fixtures::road_traffic_system();
    for _ in 0..50 {
        let mut sys = base.clone();
        sys.a = rng.random_range(-1.0..1.0);
        sys.b = rng.random_range(-1.0..1.0);
        sys.d = if rng.random_bool(0.1) {
            0.0
        } else {
            rng.random_range(0.01..1.0)
        };
        let eta = [0.1, 0.25, 0.3, 0.5, 0.75][rng.random_range(0..5)];
        let p = AbstractionParams {
            eta,
            theta: 0.0,
            mu: 0.0,
            eps: 1.0,
            delta: 0.15,
        };
        let abs = build_abstraction(&sys, &p, None).map_err(|e| e.to_string())?;
        ensure(abs.model.validate().is_valid(), || {
            "abstraction invalid".into()
        })?;
        cases += 1;
    }
    for _ in 0..200 {
        let mean = rng.random_range(-1.0..4.0);
        let d = rng.random_range(0.02..1.0);
        let eta = [0.2, 0.5, 1.0][rng.random_range(0..3)];
        let coarse = Grid::new(Interval::new(0.0, 3.0), eta).unwrap();
        let fine = Grid::new(Interval::new(0.0, 3.0), eta / 2.0).unwrap();
        let (cr, _) = kernel_row(&coarse, mean, d);
        let (fr, _) = kernel_row(&fine, mean, d);
        for (k, cell) in coarse.cells.iter().enumerate() {
            let parts: f64 = fine
                .cells
                .iter()
                .zip(&fr)
                .filter(|(c, _)| c.lo >= cell.lo - 1e-12 && c.hi <= cell.hi + 1e-12)
                .map(|(_, p)| p)
                .sum();
            ensure((cr[k] - parts).abs() <= 1e-8, || {
                format!("cell {k}: {} vs {parts}", cr[k])
            })?;
            let direct = gaussian_cell_mass(mean, d, cell.lo, cell.hi);
            let simpson = simpson_normal_mass(mean, d, cell.lo, cell.hi, 4000);
            ensure((direct - simpson).abs() <= 1e-10, || {
                format!("quadrature {direct} vs {simpson}")
            })?;
        }
        cases += 1;
    }
    ensure(cases >= 1000, || format!("only {cases} cases"))?;
    Ok(format!("{cases} generated cases, zero failures"))
}

struct Criterion {
    id: u32,
    name: &'static str,
    budget: Duration,
    run: fn() -> Check,
}

fn main() -> ExitCode {
    let criteria = [
        Criterion {
            id: 1,
            name: "five-state initial-state golden",
            budget: Duration::from_secs(1),
            run: c1_initial_golden,
        },
        Criterion {
            id: 2,
            name: "five-state current-state golden",
            budget: Duration::from_secs(1),
            run: c2_current_golden,
        },
        Criterion {
            id: 3,
            name: "value iteration vs brute force",
            budget: Duration::from_secs(30),
            run: c3_oracle_equivalence,
        },
        Criterion {
            id: 4,
            name: "Monte Carlo consistency",
            budget: Duration::from_secs(5),
            run: c4_monte_carlo,
        },
        Criterion {
            id: 5,
            name: "maximum coupling mass",
            budget: Duration::from_secs(10),
            run: c5_coupling,
        },
        Criterion {
            id: 6,
            name: "relation example and identity",
            budget: Duration::from_secs(10),
            run: c6_relation_example,
        },
        Criterion {
            id: 7,
            name: "road traffic end to end",
            budget: Duration::from_secs(10),
            run: c7_road_traffic,
        },
        Criterion {
            id: 8,
            name: "generated property suites",
            budget: Duration::from_secs(120),
            run: c8_properties,
        },
    ];
    let mut failed = 0;
    for c in &criteria {
        let start = Instant::now();
        let outcome = (c.run)();
        let elapsed = start.elapsed();
        let (ok, detail) = match outcome {
            Ok(d) if elapsed <= c.budget => (true, d),
            Ok(d) => (
                false,
                format!("{d}; took {elapsed:.2?}, budget {:.2?}", c.budget),
            ),
            Err(e) => (false, e),
        };
        if !ok {
            failed += 1;
        }
        println!(
            "criterion {} {} {:<34} {:>9.2?}  {}",
            c.id,
            if ok { "PASS" } else { "FAIL" },
            c.name,
            elapsed,
            detail
        );
    }
    println!(
        "acceptance: {} passed, {} failed",
        criteria.len() - failed,
        failed
    );
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
