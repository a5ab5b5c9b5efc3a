//! Interface-by-interface interchange scheduling.
//!
//! Each update fixes every interface but one and moves that one to where the
//! expected proxy prices on its two sides meet. Because the expected cost is
//! convex and differentiable in `q`, the expected price gap is its partial
//! derivative, so the update is an exact coordinate minimization:
//!
//! * synchronous (`sibis`): cycle over all interfaces until
//!   `||q(k) - q(k-1)||_2 <= epsilon`, all against one scenario set;
//! * asynchronous (`aibis`): one interface per time step, `i = t mod I`,
//!   against the net-load distribution of that time step;
//! * certainty equivalence (`ce`): the synchronous iteration with prices
//!   taken at the mean net load instead of averaged over scenarios.

use serde::Serialize;
use thiserror::Error;

use crate::netmodel::Network;
use crate::stochastic::{
    evaluate_system, expected_price_gap, sample_scenarios, EstimateError, NetLoadModel, ScenarioSet, StochasticError,
    SystemEstimate,
};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ScheduleError {
    #[error("invalid scheduler configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Sampling(#[from] StochasticError),
    #[error("{} at q = {q:?}: {source}", interface.as_deref().map_or("evaluation".to_string(), |i| format!("interface {i}")))]
    Estimate {
        interface: Option<String>,
        q: Vec<f64>,
        #[source]
        source: Box<EstimateError>,
    },
}

impl ScheduleError {
    pub fn is_infeasible(&self) -> bool {
        matches!(self, ScheduleError::Estimate { source, .. } if source.is_infeasible())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    Sibis,
    Aibis,
    Ce,
}

impl Mode {
    pub fn as_str(self) -> &'static str {
        match self {
            Mode::Sibis => "sibis",
            Mode::Aibis => "aibis",
            Mode::Ce => "ce",
        }
    }
}

impl std::str::FromStr for Mode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "sibis" => Ok(Mode::Sibis),
            "aibis" => Ok(Mode::Aibis),
            "ce" => Ok(Mode::Ce),
            other => Err(format!("unknown mode {other} (expected sibis, aibis or ce)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SchedulerConfig {
    pub mode: Mode,
    /// MW; cycle termination threshold on `||q(k) - q(k-1)||_2`.
    pub epsilon: f64,
    /// MW; width of the final bisection bracket.
    pub bisection_tol: f64,
    pub max_cycles: usize,
    pub samples: usize,
    pub seed: u64,
    /// Number of time steps for `aibis`.
    pub horizon: usize,
    /// Starting interchange; zero when absent.
    pub q0: Option<Vec<f64>>,
}

impl Default for SchedulerConfig {
    fn default() -> Self {
        Self {
            mode: Mode::Sibis,
            epsilon: 1e-3,
            bisection_tol: 1e-5,
            max_cycles: 50,
            samples: 1000,
            seed: 0,
            horizon: 20,
            q0: None,
        }
    }
}

impl SchedulerConfig {
    fn validate(&self, net: &Network) -> Result<Vec<f64>, ScheduleError> {
        if !(self.epsilon >= 0.0) {
            return Err(ScheduleError::Config("epsilon must be nonnegative".into()));
        }
        if !(self.bisection_tol > 0.0) {
            return Err(ScheduleError::Config("bisection_tol must be positive".into()));
        }
        if self.samples == 0 {
            return Err(ScheduleError::Config("sample count must be at least 1".into()));
        }
        let q0 = self
            .q0
            .clone()
            .unwrap_or_else(|| net.system.interfaces.iter().map(|i| i.clamp(0.0)).collect());
        if !net.system.within_bounds(&q0) {
            return Err(ScheduleError::Config(format!(
                "q0 {q0:?} must have {} entries within the interface bounds",
                net.system.interface_count()
            )));
        }
        Ok(q0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StepRecord {
    /// 1-based update counter.
    pub step: usize,
    /// Cycle `k` for synchronous runs, time `t` for asynchronous ones.
    pub round: usize,
    pub interface: usize,
    pub q: Vec<f64>,
    pub expected_cost: f64,
    /// Expected proxy prices, `[area][interface slot]`.
    pub prices: Vec<Vec<f64>>,
    /// Expected price gap across the updated interface after the update.
    pub gap: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Converged,
    MaxCycles,
    HorizonEnd,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScheduleTrace {
    pub mode: Mode,
    pub initial_q: Vec<f64>,
    pub initial_cost: f64,
    pub steps: Vec<StepRecord>,
    pub status: Status,
    /// Completed cycles (synchronous) or time steps (asynchronous).
    pub rounds: usize,
    /// Expected cost and prices at the final `q` under the stochastic
    /// scenario set (the last period's for asynchronous runs).
    pub terminal: SystemEstimate,
}

impl ScheduleTrace {
    pub fn final_q(&self) -> &[f64] {
        self.steps.last().map_or(&self.initial_q, |s| &s.q)
    }
}

fn estimate_err<'a>(net: &'a Network, i: Option<usize>, q: &[f64]) -> impl FnOnce(EstimateError) -> ScheduleError + 'a {
    let q = q.to_vec();
    move |source| ScheduleError::Estimate {
        interface: i.map(|i| net.system.interfaces[i].id.clone()),
        q,
        source: Box::new(source),
    }
}

/// Result of a single-interface optimization.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InterfaceUpdate {
    pub value: f64,
    /// Number of gap evaluations spent.
    pub evaluations: usize,
}

/// Optimal `q(i)` with the other interfaces held at `q`, found as the zero of
/// the expected price gap on `[lower_bound, capacity]`.
///
/// Bounds are checked first: a nonpositive gap at capacity returns capacity,
/// a nonnegative gap at the lower bound returns the lower bound. Otherwise the
/// bracket is halved until narrower than `bisection_tol` and the root is
/// interpolated linearly inside the final bracket.
pub fn optimize_interface(
    net: &Network,
    i: usize,
    q: &[f64],
    scenarios: &ScenarioSet,
    bisection_tol: f64,
) -> Result<InterfaceUpdate, ScheduleError> {
    let iface = &net.system.interfaces[i];
    let mut point = q.to_vec();
    let mut evaluations = 0;
    let mut gap_at = |x: f64| -> Result<f64, ScheduleError> {
        point[i] = x;
        evaluations += 1;
        expected_price_gap(net, i, &point, scenarios)
            .map(|g| g.gap)
            .map_err(estimate_err(net, Some(i), &point))
    };

    let (mut lo, mut hi) = (iface.lower_bound, iface.capacity);
    if lo == hi {
        return Ok(InterfaceUpdate {
            value: lo,
            evaluations: 0,
        });
    }
    let mut g_hi = gap_at(hi)?;
    let mut g_lo = gap_at(lo)?;
    if g_hi <= 0.0 {
        return Ok(InterfaceUpdate { value: hi, evaluations });
    }
    if g_lo >= 0.0 {
        return Ok(InterfaceUpdate { value: lo, evaluations });
    }
    while hi - lo > bisection_tol {
        let mid = 0.5 * (lo + hi);
        let g = gap_at(mid)?;
        if g < 0.0 {
            lo = mid;
            g_lo = g;
        } else if g > 0.0 {
            hi = mid;
            g_hi = g;
        } else {
            return Ok(InterfaceUpdate {
                value: mid,
                evaluations,
            });
        }
    }
    let root = lo - g_lo * (hi - lo) / (g_hi - g_lo);
    Ok(InterfaceUpdate {
        value: root.clamp(lo, hi),
        evaluations,
    })
}

fn record(
    net: &Network,
    step: usize,
    round: usize,
    i: usize,
    q: &[f64],
    eval: &ScenarioSet,
) -> Result<StepRecord, ScheduleError> {
    let est = evaluate_system(net, q, eval).map_err(estimate_err(net, Some(i), q))?;
    let iface = &net.system.interfaces[i];
    let from = est.prices[iface.from_area][net.system.areas[iface.from_area].slot_of(i).unwrap()];
    let to = est.prices[iface.to_area][net.system.areas[iface.to_area].slot_of(i).unwrap()];
    Ok(StepRecord {
        step,
        round,
        interface: i,
        q: q.to_vec(),
        expected_cost: est.cost.mean,
        prices: est.prices,
        gap: from - to,
    })
}

/// Cyclic coordinate descent: `pricing` drives the updates, `scoring` is the
/// scenario set the trace costs are reported on.
fn cyclic_descent(
    net: &Network,
    cfg: &SchedulerConfig,
    q0: Vec<f64>,
    pricing: &ScenarioSet,
    stochastic: &ScenarioSet,
) -> Result<ScheduleTrace, ScheduleError> {
    let initial_cost = evaluate_system(net, &q0, pricing)
        .map_err(estimate_err(net, None, &q0))?
        .cost
        .mean;
    let mut q = q0.clone();
    let mut steps = Vec::new();
    let mut status = Status::MaxCycles;
    let mut rounds = 0;
    for k in 1..=cfg.max_cycles {
        let previous = q.clone();
        for i in 0..net.system.interface_count() {
            q[i] = optimize_interface(net, i, &q, pricing, cfg.bisection_tol)?.value;
            steps.push(record(net, steps.len() + 1, k, i, &q, pricing)?);
        }
        rounds = k;
        let moved = q
            .iter()
            .zip(&previous)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt();
        log::debug!("cycle {k}: q = {q:?}, |dq| = {moved:e}");
        if moved <= cfg.epsilon {
            status = Status::Converged;
            break;
        }
    }
    if status == Status::MaxCycles {
        log::warn!("no convergence after {} cycles", cfg.max_cycles);
    }
    let terminal = evaluate_system(net, &q, stochastic).map_err(estimate_err(net, None, &q))?;
    Ok(ScheduleTrace {
        mode: cfg.mode,
        initial_q: q0,
        initial_cost,
        steps,
        status,
        rounds,
        terminal,
    })
}

/// Synchronous interface-by-interface scheduling. One scenario set is drawn
/// from `model` and reused for every price evaluation of the run.
pub fn run_sibis(net: &Network, model: &NetLoadModel, cfg: &SchedulerConfig) -> Result<ScheduleTrace, ScheduleError> {
    let q0 = cfg.validate(net)?;
    let scenarios = sample_scenarios(model, cfg.samples, cfg.seed)?;
    run_sibis_on(net, &scenarios, cfg, q0)
}

/// Synchronous scheduling against a given scenario set.
pub fn run_sibis_on(
    net: &Network,
    scenarios: &ScenarioSet,
    cfg: &SchedulerConfig,
    q0: Vec<f64>,
) -> Result<ScheduleTrace, ScheduleError> {
    cyclic_descent(net, cfg, q0, scenarios, scenarios)
}

/// Certainty-equivalence baseline: the synchronous iteration with every price
/// evaluated at the mean net load. Trace costs are the deterministic
/// mean-load costs; `terminal` scores the schedule on the scenario set drawn
/// from `model`.
pub fn run_ce(net: &Network, model: &NetLoadModel, cfg: &SchedulerConfig) -> Result<ScheduleTrace, ScheduleError> {
    let q0 = cfg.validate(net)?;
    let mean = ScenarioSet::point(model.mean_realization(), format!("{}#mean", model.label));
    let scenarios = sample_scenarios(model, cfg.samples, cfg.seed)?;
    cyclic_descent(net, cfg, q0, &mean, &scenarios)
}

/// Asynchronous interface-by-interface scheduling over `models_by_time`
/// (one model per time step, `t = 1..T`). At time `t` only interface
/// `(t - 1) mod I` moves, priced on scenarios drawn from that step's model.
/// Every step draws with the run seed, so identical models see identical
/// scenario sets.
pub fn run_aibis(
    net: &Network,
    models_by_time: &[NetLoadModel],
    cfg: &SchedulerConfig,
) -> Result<ScheduleTrace, ScheduleError> {
    let q0 = cfg.validate(net)?;
    if models_by_time.is_empty() {
        return Err(ScheduleError::Config(
            "asynchronous run needs at least one time step".into(),
        ));
    }
    let n_if = net.system.interface_count();
    let mut scenarios = sample_scenarios(&models_by_time[0], cfg.samples, cfg.seed)?;
    let initial_cost = evaluate_system(net, &q0, &scenarios)
        .map_err(estimate_err(net, None, &q0))?
        .cost
        .mean;
    let mut q = q0.clone();
    let mut steps = Vec::with_capacity(models_by_time.len());
    for (t0, model) in models_by_time.iter().enumerate() {
        if t0 > 0 && *model != models_by_time[t0 - 1] {
            scenarios = sample_scenarios(model, cfg.samples, cfg.seed)?;
        }
        let t = t0 + 1;
        let i = t0 % n_if;
        q[i] = optimize_interface(net, i, &q, &scenarios, cfg.bisection_tol)?.value;
        steps.push(record(net, t, t, i, &q, &scenarios)?);
    }
    let terminal = evaluate_system(net, &q, &scenarios).map_err(estimate_err(net, None, &q))?;
    Ok(ScheduleTrace {
        mode: Mode::Aibis,
        initial_q: q0,
        initial_cost,
        steps,
        status: Status::HorizonEnd,
        rounds: models_by_time.len(),
        terminal,
    })
}

/// Synchronous scheduling repeated at every time step, each run warm-started
/// from the previous step's schedule. This is the per-time optimum that an
/// asynchronous run is measured against.
pub fn run_sibis_over_time(
    net: &Network,
    models_by_time: &[NetLoadModel],
    cfg: &SchedulerConfig,
) -> Result<Vec<ScheduleTrace>, ScheduleError> {
    let mut q = cfg.validate(net)?;
    let mut traces = Vec::with_capacity(models_by_time.len());
    for model in models_by_time {
        let scenarios = sample_scenarios(model, cfg.samples, cfg.seed)?;
        let trace = run_sibis_on(net, &scenarios, cfg, q.clone())?;
        q = trace.final_q().to_vec();
        traces.push(trace);
    }
    Ok(traces)
}
