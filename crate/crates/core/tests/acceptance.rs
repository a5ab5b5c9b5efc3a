//! Acceptance run: one line per criterion, nonzero exit if any fails.

mod common;

use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use tieflow::netmodel::project_interchange;
use tieflow::oracle::{envelope_check, grid_search, GridSpec, OracleError};
use tieflow::qp::{check_kkt, solve_qp};
use tieflow::report::Summary;
use tieflow::scheduler::{run_sibis_on, run_sibis_over_time};
use tieflow::stochastic::{evaluate_system, expected_cost, sample_scenarios};
use tieflow::{run_aibis, run_ce, run_sibis, Mode, SchedulerConfig, Status};

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

fn check(cond: bool, detail: String) -> Outcome {
    if cond {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn within(elapsed: Duration, limit: Duration, detail: String) -> Outcome {
    check(
        elapsed <= limit,
        format!("{detail}; {:.1}s of {}s", elapsed.as_secs_f64(), limit.as_secs()),
    )
}

/// 500 random strictly convex QPs against active-set enumeration.
fn qp_oracle() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(20_160_901);
    let (mut worst_obj, mut worst_kkt) = (0.0f64, 0.0f64);
    for k in 0..500 {
        let n = rng.random_range(1..=6);
        let m = rng.random_range(0..=8);
        let p = rng.random_range(0..=2usize).min(n - 1);
        let qp = common::random_qp(&mut rng, n, p, m);
        let sol = solve_qp(&qp).map_err(|e| format!("problem {k}: {e}"))?;
        let (_, f) = common::enumerate_qp(&qp).ok_or(format!("problem {k}: enumeration found no optimum"))?;
        worst_obj = worst_obj.max((sol.objective - f).abs() / f.abs().max(1.0));
        worst_kkt = worst_kkt.max(check_kkt(&qp, &sol).max());
    }
    let detail = format!("worst objective rel. error {worst_obj:.1e}, worst KKT residual {worst_kkt:.1e}");
    check(worst_obj <= 1e-7 && worst_kkt <= 1e-8, detail.clone())?;
    within(start.elapsed(), Duration::from_secs(30), detail)
}

/// Finite differences of area cost against proxy prices.
fn envelope() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let fixtures: Vec<_> = ["two_area.case", "fig1.case", "ramp.case"]
        .iter()
        .map(|f| common::fixture(f))
        .collect();
    let (mut checked, mut skipped) = (0, 0);
    let mut worst = 0.0f64;
    while checked < 100 {
        if checked + skipped > 1000 {
            return Err(format!("only {checked} usable points after {skipped} skipped"));
        }
        let (case, net) = &fixtures[rng.random_range(0..fixtures.len())];
        let q: Vec<f64> = net
            .system
            .interfaces
            .iter()
            .map(|f| rng.random_range(f.lower_bound..f.capacity))
            .collect();
        let d = sample_scenarios(&case.model, 1, rng.random())
            .unwrap()
            .samples
            .remove(0);
        let n = rng.random_range(0..net.system.area_count());
        let (area, sf) = net.area(n);
        match envelope_check(area, sf, &project_interchange(&q, area), &d[n], 1e-3) {
            Ok(r) => {
                worst = worst.max(r.max_relative_deviation);
                checked += 1;
            }
            Err(OracleError::Degenerate | OracleError::Kink { .. } | OracleError::Dispatch(_)) => skipped += 1,
            Err(e) => return Err(e.to_string()),
        }
    }
    let detail = format!("{checked} points, {skipped} skipped at kinks, worst rel. deviation {worst:.1e}");
    check(worst <= 1e-4, detail.clone())?;
    within(start.elapsed(), Duration::from_secs(60), detail)
}

/// Closed-form two-area optimum.
fn analytic() -> Outcome {
    let (case, net) = common::fixture("two_area.case");
    let cfg = SchedulerConfig {
        seed: 7,
        ..Default::default()
    };
    let trace = run_sibis(&net, &case.model, &cfg).map_err(|e| e.to_string())?;
    let q = trace.final_q()[0];
    let p = &trace.terminal.prices;
    let cost = trace.terminal.cost.mean;
    check(
        (q - 50.0).abs() <= cfg.bisection_tol
            && (p[0][0] - 150.0).abs() <= 0.01
            && (p[1][0] - 150.0).abs() <= 0.01
            && (cost - 22500.0).abs() <= 0.1,
        format!("q = {q}, prices {:.6}/{:.6}, cost {cost:.6}", p[0][0], p[1][0]),
    )
}

/// Cost never rises across single-interface updates.
fn monotone_descent() -> Outcome {
    let (case, net) = common::fixture("fig1.case");
    let mut worst = f64::NEG_INFINITY;
    let mut updates = 0;
    for seed in 0..20 {
        let mut rng = ChaCha8Rng::seed_from_u64(1000 + seed);
        let q0 = net
            .system
            .interfaces
            .iter()
            .map(|f| rng.random_range(f.lower_bound..f.capacity))
            .collect();
        let cfg = SchedulerConfig {
            seed,
            q0: Some(q0),
            ..Default::default()
        };
        let trace = run_sibis(&net, &case.model, &cfg).map_err(|e| format!("seed {seed}: {e}"))?;
        let mut prev = trace.initial_cost;
        for step in &trace.steps {
            let rise = (step.expected_cost - prev) / prev.abs().max(1.0);
            worst = worst.max(rise);
            prev = step.expected_cost;
            updates += 1;
        }
    }
    check(
        worst <= 1e-9,
        format!("20 seeds, {updates} updates, largest relative rise {worst:.1e}"),
    )
}

/// SIBIS terminal point against the 1 MW expected-cost map.
fn grid_optimality() -> Outcome {
    let start = Instant::now();
    let (case, net) = common::fixture("fig1.case");
    let cfg = SchedulerConfig {
        seed: 11,
        ..Default::default()
    };
    let scenarios = sample_scenarios(&case.model, cfg.samples, cfg.seed).unwrap();
    let trace = run_sibis_on(&net, &scenarios, &cfg, vec![0.0, 0.0]).map_err(|e| e.to_string())?;
    let spec = GridSpec::full(&net.system, 1.0).map_err(|e| e.to_string())?;
    let map = grid_search(&net, &scenarios, &spec).map_err(|e| e.to_string())?;
    let q = trace.final_q();
    let step_off = q
        .iter()
        .zip(&map.argmin)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    let sibis_cost = expected_cost(&net, q, &scenarios).unwrap().mean;
    let gap = (sibis_cost - map.min_cost) / map.min_cost.abs();
    let detail = format!(
        "sibis q {q:.3?}, grid argmin {:?} over {} points, max offset {step_off:.3} MW, cost gap {:.2e}",
        map.argmin,
        map.points.len(),
        gap
    );
    check(step_off <= 1.0 && gap <= 1e-3, detail.clone())?;
    within(start.elapsed(), Duration::from_secs(300), detail)
}

/// Expected proxy prices meet at an interior SIBIS solution.
fn price_convergence() -> Outcome {
    let (case, net) = common::fixture("fig1.case");
    let cfg = SchedulerConfig {
        seed: 3,
        ..Default::default()
    };
    let trace = run_sibis(&net, &case.model, &cfg).map_err(|e| e.to_string())?;
    let summary = Summary::new(&case, &cfg, &trace.initial_q, &trace);
    if summary.at_bound.iter().any(|b| *b) {
        return Err(format!("an interface ended at a bound: q = {:?}", summary.q));
    }
    let prices: Vec<f64> = trace.terminal.prices.iter().flatten().copied().collect();
    let hi = prices.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let lo = prices.iter().copied().fold(f64::INFINITY, f64::min);
    check(
        hi - lo <= 0.01,
        format!(
            "q = {:?}, proxy prices {prices:.4?}, max pairwise gap {:.1e}",
            summary.q,
            hi - lo
        ),
    )
}

/// The stochastic schedule beats certainty equivalence out of sample.
fn ce_dominance() -> Outcome {
    let (case, net) = common::fixture("fig1.case");
    let cfg = SchedulerConfig {
        seed: 5,
        ..Default::default()
    };
    let sibis = run_sibis(&net, &case.model, &cfg).map_err(|e| e.to_string())?;
    let ce = run_ce(
        &net,
        &case.model,
        &SchedulerConfig {
            mode: Mode::Ce,
            ..cfg.clone()
        },
    )
    .map_err(|e| e.to_string())?;
    let fresh = sample_scenarios(&case.model, 10_000, 424_242).unwrap();
    let a = evaluate_system(&net, sibis.final_q(), &fresh).map_err(|e| e.to_string())?;
    let b = evaluate_system(&net, ce.final_q(), &fresh).map_err(|e| e.to_string())?;
    check(
        a.cost.mean < b.cost.mean,
        format!(
            "out-of-sample cost sibis {:.3} vs ce {:.3} (improvement {:.3}); ce q {:.3?}",
            a.cost.mean,
            b.cost.mean,
            b.cost.mean - a.cost.mean,
            ce.final_q()
        ),
    )
}

/// AIBIS under i.i.d. models reaches the SIBIS point within 20 steps.
fn aibis_iid() -> Outcome {
    let (case, net) = common::fixture("fig1.case");
    let cfg = SchedulerConfig {
        seed: 9,
        q0: Some(vec![150.0, -150.0]),
        ..Default::default()
    };
    let sibis = run_sibis(&net, &case.model, &cfg).map_err(|e| e.to_string())?;
    let aibis = run_aibis(
        &net,
        &case.models_by_time(20),
        &SchedulerConfig {
            mode: Mode::Aibis,
            ..cfg.clone()
        },
    )
    .map_err(|e| e.to_string())?;
    let diff = sibis
        .final_q()
        .iter()
        .zip(aibis.final_q())
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    check(
        aibis.steps.len() == 20 && diff <= 2.0 * cfg.bisection_tol,
        format!("after {} steps max |q_aibis - q_sibis| = {diff:.1e}", aibis.steps.len()),
    )
}

/// AIBIS tracks per-time SIBIS under a ramped mean.
fn aibis_tracking() -> Outcome {
    let (case, net) = common::fixture("ramp.case");
    let models = case.models_by_time(case.periods.len());
    let cfg = SchedulerConfig {
        seed: 13,
        q0: Some(vec![150.0, -150.0]),
        ..Default::default()
    };
    let aibis = run_aibis(
        &net,
        &models,
        &SchedulerConfig {
            mode: Mode::Aibis,
            ..cfg.clone()
        },
    )
    .map_err(|e| e.to_string())?;
    let sibis = run_sibis_over_time(&net, &models, &cfg).map_err(|e| e.to_string())?;
    if sibis.iter().any(|t| t.status != Status::Converged) {
        return Err("a per-time sibis run did not converge".into());
    }
    let gaps: Vec<f64> = aibis
        .steps
        .iter()
        .zip(&sibis)
        .map(|(a, s)| a.expected_cost - s.terminal.cost.mean)
        .collect();
    let n = gaps.len() as f64;
    let t_mean = (n - 1.0) / 2.0;
    let g_mean = gaps.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx) = (0.0, 0.0);
    for (t, g) in gaps.iter().enumerate() {
        sxy += (t as f64 - t_mean) * (g - g_mean);
        sxx += (t as f64 - t_mean).powi(2);
    }
    let slope = sxy / sxx;
    check(
        gaps[0].is_finite() && slope <= 0.0,
        format!(
            "{} steps, gap first {:.3} last {:.3}, regression slope {slope:.3}",
            gaps.len(),
            gaps[0],
            gaps[gaps.len() - 1]
        ),
    )
}

/// Identical inputs give byte-identical summaries on 1 and 4 threads.
fn determinism() -> Outcome {
    let (case, net) = common::fixture("fig1.case");
    let cfg = SchedulerConfig {
        seed: 21,
        samples: 500,
        ..Default::default()
    };
    let summary = |threads: usize| {
        let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap();
        pool.install(|| {
            let trace = run_sibis(&net, &case.model, &cfg).unwrap();
            Summary::new(&case, &cfg, &trace.initial_q, &trace).to_json()
        })
    };
    let runs = [summary(1), summary(1), summary(4), summary(4)];
    check(
        runs.iter().all(|r| r == &runs[0]),
        format!("{} runs, {} bytes each", runs.len(), runs[0].len()),
    )
}

fn main() {
    let criteria: [Criterion; 10] = [
        ("QP oracle equivalence", qp_oracle),
        ("envelope check", envelope),
        ("analytic two-area fixture", analytic),
        ("monotone descent", monotone_descent),
        ("oracle optimality", grid_optimality),
        ("price convergence", price_convergence),
        ("CE dominance", ce_dominance),
        ("AIBIS i.i.d. convergence", aibis_iid),
        ("AIBIS tracking", aibis_tracking),
        ("determinism", determinism),
    ];
    let mut failed = 0;
    for (k, (name, run)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let outcome = run();
        let secs = start.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => println!("criterion {:>2} PASS  {name}: {detail} [{secs:.1}s]", k + 1),
            Err(detail) => {
                failed += 1;
                println!("criterion {:>2} FAIL  {name}: {detail} [{secs:.1}s]", k + 1);
            }
        }
    }
    println!("{} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
