//! Net-load uncertainty, scenario generation and sample-average estimates.
//!
//! Every estimate here is a pure function of `(network, q, scenario set)`.
//! Scenario dispatches run in parallel but are reduced in sample order, so
//! results are bit-identical regardless of the worker count.

use std::collections::HashMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::Serialize;
use statrs::distribution::{Continuous, ContinuousCDF, Normal};
use thiserror::Error;

use crate::dispatch::{solve_dispatch, DispatchError, DispatchSolution};
use crate::netmodel::{project_interchange, Network};
use crate::qp::Degeneracy;

/// Share of excluded samples above which an estimate is rejected.
pub const MAX_EXCLUDED_FRACTION: f64 = 0.05;

const MAX_REJECTIONS: usize = 10_000;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum StochasticError {
    #[error("invalid distribution at bus {bus}: {reason}")]
    InvalidDistribution { bus: String, reason: String },
    #[error("truncation at bus {bus} rejected {attempts} consecutive draws")]
    RejectionFailure { bus: String, attempts: usize },
    #[error("scenario count must be at least 1")]
    EmptySample,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EstimateError {
    #[error(
        "{excluded} of {total} samples excluded ({infeasible} infeasible, {degenerate} degenerate){}",
        first_infeasible.as_ref().map(|e| format!("; first infeasibility: {e}")).unwrap_or_default()
    )]
    TooManyExcluded {
        excluded: usize,
        total: usize,
        infeasible: usize,
        degenerate: usize,
        first_infeasible: Option<DispatchError>,
    },
    #[error(transparent)]
    Dispatch(#[from] DispatchError),
}

impl EstimateError {
    /// True when exclusions are driven by infeasible dispatches.
    pub fn is_infeasible(&self) -> bool {
        match self {
            EstimateError::TooManyExcluded { infeasible, .. } => *infeasible > 0,
            EstimateError::Dispatch(DispatchError::Infeasible { .. }) => true,
            EstimateError::Dispatch(_) => false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum InjectionDistribution {
    PointMass {
        value: f64,
    },
    Gaussian {
        mean: f64,
        std: f64,
    },
    GaussianMixture {
        weights: Vec<f64>,
        means: Vec<f64>,
        stds: Vec<f64>,
    },
}

impl InjectionDistribution {
    /// Two-mode 50/50 mixture, as used for wind production forecasts.
    pub fn two_mode(high: (f64, f64), low: (f64, f64)) -> Self {
        InjectionDistribution::GaussianMixture {
            weights: vec![0.5, 0.5],
            means: vec![high.0, low.0],
            stds: vec![high.1, low.1],
        }
    }

    fn components(&self) -> Vec<(f64, f64, f64)> {
        match self {
            InjectionDistribution::PointMass { value } => vec![(1.0, *value, 0.0)],
            InjectionDistribution::Gaussian { mean, std } => vec![(1.0, *mean, *std)],
            InjectionDistribution::GaussianMixture { weights, means, stds } => weights
                .iter()
                .zip(means)
                .zip(stds)
                .map(|((w, m), s)| (*w, *m, *s))
                .collect(),
        }
    }

    pub fn validate(&self) -> Result<(), String> {
        match self {
            InjectionDistribution::PointMass { value } if !value.is_finite() => {
                Err("point mass value must be finite".into())
            }
            InjectionDistribution::Gaussian { std, mean } if !(*std > 0.0) || !mean.is_finite() => {
                Err(format!("gaussian std must be positive (got {std})"))
            }
            InjectionDistribution::GaussianMixture { weights, means, stds } => {
                if weights.is_empty() || weights.len() != means.len() || weights.len() != stds.len() {
                    return Err("mixture weights, means and stds must have equal nonzero length".into());
                }
                if weights.iter().any(|w| !(*w > 0.0)) {
                    return Err("mixture weights must be positive".into());
                }
                let total: f64 = weights.iter().sum();
                if (total - 1.0).abs() > 1e-9 {
                    return Err(format!("mixture weights sum to {total}, expected 1"));
                }
                if stds.iter().any(|s| !(*s > 0.0)) {
                    return Err("mixture stds must be positive".into());
                }
                if means.iter().any(|m| !m.is_finite()) {
                    return Err("mixture means must be finite".into());
                }
                Ok(())
            }
            _ => Ok(()),
        }
    }

    /// Probability mass inside `[lo, hi]`.
    pub fn mass_within(&self, lo: f64, hi: f64) -> f64 {
        self.components()
            .iter()
            .map(|&(w, m, s)| {
                if s == 0.0 {
                    if (lo..=hi).contains(&m) {
                        w
                    } else {
                        0.0
                    }
                } else {
                    let n = Normal::new(m, s).expect("validated std");
                    w * (n.cdf(hi) - n.cdf(lo))
                }
            })
            .sum()
    }

    /// Mean, conditioned on the truncation interval when one is given.
    pub fn mean(&self, truncation: Option<(f64, f64)>) -> f64 {
        let comps = self.components();
        let Some((lo, hi)) = truncation else {
            return comps.iter().map(|(w, m, _)| w * m).sum();
        };
        let mut mass = 0.0;
        let mut moment = 0.0;
        for (w, m, s) in comps {
            if s == 0.0 {
                if (lo..=hi).contains(&m) {
                    mass += w;
                    moment += w * m;
                }
                continue;
            }
            let std = Normal::new(0.0, 1.0).expect("standard normal");
            let (a, b) = ((lo - m) / s, (hi - m) / s);
            let z = std.cdf(b) - std.cdf(a);
            mass += w * z;
            moment += w * (z * m + s * (std.pdf(a) - std.pdf(b)));
        }
        moment / mass
    }

    /// Same distribution with every location moved by `delta`.
    pub fn shifted(&self, delta: f64) -> Self {
        match self {
            InjectionDistribution::PointMass { value } => InjectionDistribution::PointMass { value: value + delta },
            InjectionDistribution::Gaussian { mean, std } => InjectionDistribution::Gaussian {
                mean: mean + delta,
                std: *std,
            },
            InjectionDistribution::GaussianMixture { weights, means, stds } => InjectionDistribution::GaussianMixture {
                weights: weights.clone(),
                means: means.iter().map(|m| m + delta).collect(),
                stds: stds.clone(),
            },
        }
    }

    /// One untruncated draw: component by weight, then a Gaussian draw.
    fn draw<R: Rng>(&self, rng: &mut R) -> f64 {
        match self {
            InjectionDistribution::PointMass { value } => *value,
            InjectionDistribution::Gaussian { mean, std } => mean + std * rng.sample::<f64, _>(StandardNormal),
            InjectionDistribution::GaussianMixture { weights, means, stds } => {
                let u: f64 = rng.random();
                let mut acc = 0.0;
                let mut k = weights.len() - 1;
                for (c, w) in weights.iter().enumerate() {
                    acc += w;
                    if u < acc {
                        k = c;
                        break;
                    }
                }
                means[k] + stds[k] * rng.sample::<f64, _>(StandardNormal)
            }
        }
    }
}

/// A random injection (e.g. wind) at one bus; net load there is
/// `base_load - injection`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Injection {
    pub bus: String,
    #[serde(skip)]
    pub area: usize,
    #[serde(skip)]
    pub local: usize,
    pub distribution: InjectionDistribution,
    pub truncation: Option<(f64, f64)>,
}

impl Injection {
    fn sample<R: Rng>(&self, rng: &mut R) -> Result<f64, StochasticError> {
        let Some((lo, hi)) = self.truncation else {
            return Ok(self.distribution.draw(rng));
        };
        for _ in 0..MAX_REJECTIONS {
            let v = self.distribution.draw(rng);
            if (lo..=hi).contains(&v) {
                return Ok(v);
            }
        }
        Err(StochasticError::RejectionFailure {
            bus: self.bus.clone(),
            attempts: MAX_REJECTIONS,
        })
    }

    pub fn mean(&self) -> f64 {
        self.distribution.mean(self.truncation)
    }
}

/// Net load of every bus of every area, `[area][local bus]`, MW.
pub type Realization = Vec<Vec<f64>>;

/// Per-bus net-load distribution for one scheduling instant.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NetLoadModel {
    pub label: String,
    #[serde(skip)]
    pub base_load: Realization,
    pub injections: Vec<Injection>,
}

impl NetLoadModel {
    pub fn deterministic(label: impl Into<String>, base_load: Realization) -> Self {
        Self {
            label: label.into(),
            base_load,
            injections: vec![],
        }
    }

    pub fn validate(&self) -> Result<(), StochasticError> {
        for inj in &self.injections {
            inj.distribution
                .validate()
                .map_err(|reason| StochasticError::InvalidDistribution {
                    bus: inj.bus.clone(),
                    reason,
                })?;
            if let Some((lo, hi)) = inj.truncation {
                if !(lo < hi) {
                    return Err(StochasticError::InvalidDistribution {
                        bus: inj.bus.clone(),
                        reason: format!("empty truncation interval [{lo}, {hi}]"),
                    });
                }
                if inj.distribution.mass_within(lo, hi) < 1e-9 {
                    return Err(StochasticError::InvalidDistribution {
                        bus: inj.bus.clone(),
                        reason: format!("truncation interval [{lo}, {hi}] has negligible mass"),
                    });
                }
            }
        }
        Ok(())
    }

    /// Net load with every injection at its mean.
    pub fn mean_realization(&self) -> Realization {
        let mut d = self.base_load.clone();
        for inj in &self.injections {
            d[inj.area][inj.local] -= inj.mean();
        }
        d
    }

    /// Copy with every injection location moved by `delta` MW.
    pub fn shifted(&self, label: impl Into<String>, delta: f64) -> Self {
        Self {
            label: label.into(),
            base_load: self.base_load.clone(),
            injections: self
                .injections
                .iter()
                .map(|inj| Injection {
                    distribution: inj.distribution.shifted(delta),
                    truncation: inj.truncation.map(|(lo, hi)| (lo + delta, hi + delta)),
                    ..inj.clone()
                })
                .collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioSet {
    pub seed: u64,
    pub samples: Vec<Realization>,
    /// Identifies the draw for common-random-number reuse.
    pub crn_tag: String,
}

impl ScenarioSet {
    /// A single scenario, e.g. the mean realization.
    pub fn point(realization: Realization, tag: impl Into<String>) -> Self {
        Self {
            seed: 0,
            samples: vec![realization],
            crn_tag: tag.into(),
        }
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }
}

/// Draws `m` realizations of `model`. Injections are sampled in sample-major,
/// declaration order from a ChaCha stream seeded by `seed`.
pub fn sample_scenarios(model: &NetLoadModel, m: usize, seed: u64) -> Result<ScenarioSet, StochasticError> {
    if m == 0 {
        return Err(StochasticError::EmptySample);
    }
    model.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut samples = Vec::with_capacity(m);
    for _ in 0..m {
        let mut d = model.base_load.clone();
        for inj in &model.injections {
            d[inj.area][inj.local] -= inj.sample(&mut rng)?;
        }
        samples.push(d);
    }
    Ok(ScenarioSet {
        seed,
        samples,
        crn_tag: format!("{}#{}x{}", model.label, seed, m),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Estimate {
    pub mean: f64,
    pub stderr: f64,
}

impl Estimate {
    /// Mean and standard error, summed in slice order.
    pub fn from_values(values: &[f64]) -> Self {
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let stderr = if values.len() > 1 {
            let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
            (var / n).sqrt()
        } else {
            0.0
        };
        Self { mean, stderr }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CostEstimate {
    pub mean: f64,
    pub stderr: f64,
    pub excluded: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LmpEstimate {
    pub mean: Vec<f64>,
    pub stderr: Vec<f64>,
    pub excluded: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GapEstimate {
    /// Expected from-area proxy price minus expected to-area proxy price.
    pub gap: f64,
    pub price_from: f64,
    pub price_to: f64,
    pub excluded: usize,
}

/// Cost and proxy prices of every area under the same samples.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SystemEstimate {
    pub cost: CostEstimate,
    /// `[area][interface slot]`, $/MW.
    pub prices: Vec<Vec<f64>>,
}

#[derive(Clone)]
enum Outcome {
    Usable(DispatchSolution),
    Degenerate,
    Infeasible(DispatchError),
}

fn dispatch_outcome(net: &Network, n: usize, q_n: &[f64], d_n: &[f64]) -> Result<Outcome, EstimateError> {
    let (area, sf) = net.area(n);
    match solve_dispatch(area, sf, q_n, d_n) {
        Ok(sol) if sol.degeneracy == Degeneracy::None => Ok(Outcome::Usable(sol)),
        Ok(_) => Ok(Outcome::Degenerate),
        Err(e @ DispatchError::Infeasible { .. }) => Ok(Outcome::Infeasible(e)),
        Err(e) => Err(e.into()),
    }
}

/// Solves area `n` once per distinct area net load in `scenarios`. Returns
/// the outcomes and, per sample, the index of its outcome.
fn solve_distinct(
    net: &Network,
    n: usize,
    q_n: &[f64],
    scenarios: &ScenarioSet,
) -> Result<(Vec<Outcome>, Vec<usize>), EstimateError> {
    let mut seen: HashMap<Vec<u64>, usize> = HashMap::new();
    let mut loads: Vec<&[f64]> = Vec::new();
    let slots = scenarios
        .samples
        .iter()
        .map(|d| {
            let key = d[n].iter().map(|v| v.to_bits()).collect();
            *seen.entry(key).or_insert_with(|| {
                loads.push(&d[n]);
                loads.len() - 1
            })
        })
        .collect();
    let outcomes = loads
        .par_iter()
        .map(|d_n| dispatch_outcome(net, n, q_n, d_n))
        .collect::<Result<Vec<_>, _>>()?;
    Ok((outcomes, slots))
}

/// Solves `areas` for every sample and keeps only samples usable in all of
/// them. Returns `(per-sample solutions, excluded count)`.
fn solve_samples(
    net: &Network,
    areas: &[usize],
    q: &[f64],
    scenarios: &ScenarioSet,
) -> Result<(Vec<Vec<DispatchSolution>>, usize), EstimateError> {
    let per_area = areas
        .iter()
        .map(|&n| solve_distinct(net, n, &project_interchange(q, &net.system.areas[n]), scenarios))
        .collect::<Result<Vec<_>, _>>()?;
    let outcomes = (0..scenarios.len()).map(|s| {
        per_area
            .iter()
            .map(|(outcomes, slots)| outcomes[slots[s]].clone())
            .collect::<Vec<_>>()
    });

    let total = scenarios.len();
    let mut usable = Vec::with_capacity(total);
    let (mut infeasible, mut degenerate) = (0, 0);
    let mut first_infeasible = None;
    for sample in outcomes {
        let mut sols = Vec::with_capacity(sample.len());
        let mut bad = None;
        for o in sample {
            match o {
                Outcome::Usable(s) => sols.push(s),
                Outcome::Degenerate => {
                    bad.get_or_insert(false);
                }
                Outcome::Infeasible(e) => {
                    if first_infeasible.is_none() {
                        first_infeasible = Some(e);
                    }
                    bad = Some(true);
                }
            }
        }
        match bad {
            None => usable.push(sols),
            Some(true) => infeasible += 1,
            Some(false) => degenerate += 1,
        }
    }
    let excluded = infeasible + degenerate;
    if usable.is_empty() || excluded as f64 > MAX_EXCLUDED_FRACTION * total as f64 {
        return Err(EstimateError::TooManyExcluded {
            excluded,
            total,
            infeasible,
            degenerate,
            first_infeasible,
        });
    }
    if excluded > 0 {
        log::debug!("{excluded} of {total} samples excluded ({infeasible} infeasible)");
    }
    Ok((usable, excluded))
}

/// Sample-average expected total cost `C(q)`.
pub fn expected_cost(net: &Network, q: &[f64], scenarios: &ScenarioSet) -> Result<CostEstimate, EstimateError> {
    Ok(evaluate_system(net, q, scenarios)?.cost)
}

/// Sample-average cost and proxy prices of every area.
pub fn evaluate_system(net: &Network, q: &[f64], scenarios: &ScenarioSet) -> Result<SystemEstimate, EstimateError> {
    let areas: Vec<usize> = (0..net.system.area_count()).collect();
    let (sols, excluded) = solve_samples(net, &areas, q, scenarios)?;
    let costs: Vec<f64> = sols.iter().map(|s| s.iter().map(|a| a.cost).sum()).collect();
    let cost = Estimate::from_values(&costs);
    let prices = areas
        .iter()
        .map(|&n| mean_prices(&sols, n, net.system.areas[n].interfaces.len()).0)
        .collect();
    Ok(SystemEstimate {
        cost: CostEstimate {
            mean: cost.mean,
            stderr: cost.stderr,
            excluded,
        },
        prices,
    })
}

fn mean_prices(sols: &[Vec<DispatchSolution>], pos: usize, slots: usize) -> (Vec<f64>, Vec<f64>) {
    (0..slots)
        .map(|j| {
            let values: Vec<f64> = sols.iter().map(|s| s[pos].pi[j]).collect();
            let e = Estimate::from_values(&values);
            (e.mean, e.stderr)
        })
        .unzip()
}

/// Sample-average proxy prices of area `n` at outbound interchange `q_n`.
pub fn expected_lmp(
    net: &Network,
    n: usize,
    q_n: &[f64],
    scenarios: &ScenarioSet,
) -> Result<LmpEstimate, EstimateError> {
    let area = &net.system.areas[n];
    let (distinct, slots) = solve_distinct(net, n, q_n, scenarios)?;
    let outcomes = slots.iter().map(|&k| distinct[k].clone());
    let mut sols = Vec::with_capacity(slots.len());
    let (mut infeasible, mut degenerate) = (0, 0);
    let mut first_infeasible = None;
    for o in outcomes {
        match o {
            Outcome::Usable(s) => sols.push(vec![s]),
            Outcome::Degenerate => degenerate += 1,
            Outcome::Infeasible(e) => {
                infeasible += 1;
                first_infeasible.get_or_insert(e);
            }
        }
    }
    let excluded = infeasible + degenerate;
    let total = scenarios.len();
    if sols.is_empty() || excluded as f64 > MAX_EXCLUDED_FRACTION * total as f64 {
        return Err(EstimateError::TooManyExcluded {
            excluded,
            total,
            infeasible,
            degenerate,
            first_infeasible,
        });
    }
    let (mean, stderr) = mean_prices(&sols, 0, area.interfaces.len());
    Ok(LmpEstimate { mean, stderr, excluded })
}

/// Expected price difference across interface `i`: from-area proxy price
/// minus to-area proxy price. This is the derivative of `C(q)` along `q(i)`,
/// so it is nondecreasing in `q(i)` and its zero is the coordinate optimum.
pub fn expected_price_gap(
    net: &Network,
    i: usize,
    q: &[f64],
    scenarios: &ScenarioSet,
) -> Result<GapEstimate, EstimateError> {
    let iface = &net.system.interfaces[i];
    let areas = [iface.from_area, iface.to_area];
    let (sols, excluded) = solve_samples(net, &areas, q, scenarios)?;
    let slot_from = net.system.areas[iface.from_area]
        .slot_of(i)
        .expect("interface listed by its from-area");
    let slot_to = net.system.areas[iface.to_area]
        .slot_of(i)
        .expect("interface listed by its to-area");
    let n = sols.len() as f64;
    let price_from = sols.iter().map(|s| s[0].pi[slot_from]).sum::<f64>() / n;
    let price_to = sols.iter().map(|s| s[1].pi[slot_to]).sum::<f64>() / n;
    Ok(GapEstimate {
        gap: price_from - price_to,
        price_from,
        price_to,
        excluded,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn single_bus_model(dist: InjectionDistribution, truncation: Option<(f64, f64)>) -> NetLoadModel {
        NetLoadModel {
            label: "t".into(),
            base_load: vec![vec![0.0]],
            injections: vec![Injection {
                bus: "w".into(),
                area: 0,
                local: 0,
                distribution: dist,
                truncation,
            }],
        }
    }

    #[test]
    fn point_mass_repeats() {
        let model = single_bus_model(InjectionDistribution::PointMass { value: -100.0 }, None);
        let set = sample_scenarios(&model, 5, 1).unwrap();
        assert_eq!(set.len(), 5);
        assert!(set.samples.iter().all(|s| s[0][0] == 100.0));
    }

    #[test]
    fn two_mode_mixture_mean() {
        let model = single_bus_model(InjectionDistribution::two_mode((150.0, 12.0), (50.0, 4.0)), None);
        let set = sample_scenarios(&model, 100_000, 2016).unwrap();
        let mean = -set.samples.iter().map(|s| s[0][0]).sum::<f64>() / set.len() as f64;
        assert!((mean - 100.0).abs() < 0.5, "{mean}");
        assert_eq!(model.injections[0].mean(), 100.0);
    }

    #[test]
    fn same_seed_same_set() {
        let model = single_bus_model(
            InjectionDistribution::Gaussian { mean: 10.0, std: 3.0 },
            Some((0.0, 20.0)),
        );
        assert_eq!(
            sample_scenarios(&model, 50, 9).unwrap(),
            sample_scenarios(&model, 50, 9).unwrap()
        );
        assert_ne!(
            sample_scenarios(&model, 50, 9).unwrap(),
            sample_scenarios(&model, 50, 10).unwrap()
        );
    }

    #[test]
    fn truncation_respected() {
        let model = single_bus_model(
            InjectionDistribution::Gaussian { mean: 0.0, std: 10.0 },
            Some((0.0, 5.0)),
        );
        let set = sample_scenarios(&model, 2000, 3).unwrap();
        assert!(set.samples.iter().all(|s| (-5.0..=0.0).contains(&s[0][0])));
    }

    #[test]
    fn truncated_mean_matches_quadrature() {
        let dist = InjectionDistribution::two_mode((150.0, 12.0), (50.0, 4.0));
        let (lo, hi) = (45.0, 160.0);
        // Midpoint rule on the mixture density.
        let pdf = |w: f64| {
            let g = |m: f64, s: f64| {
                (-(w - m) * (w - m) / (2.0 * s * s)).exp() / (2.0 * std::f64::consts::PI * s * s).sqrt()
            };
            0.5 * g(150.0, 12.0) + 0.5 * g(50.0, 4.0)
        };
        let steps = 200_000;
        let h = (hi - lo) / steps as f64;
        let (mut mass, mut moment) = (0.0, 0.0);
        for k in 0..steps {
            let w = lo + (k as f64 + 0.5) * h;
            mass += pdf(w) * h;
            moment += w * pdf(w) * h;
        }
        assert_abs_diff_eq!(dist.mean(Some((lo, hi))), moment / mass, epsilon = 1e-6);
        assert_abs_diff_eq!(dist.mass_within(lo, hi), mass, epsilon = 1e-8);
    }

    #[test]
    fn rejects_bad_distributions() {
        let bad = [
            InjectionDistribution::Gaussian { mean: 0.0, std: 0.0 },
            InjectionDistribution::GaussianMixture {
                weights: vec![0.5, 0.4],
                means: vec![0.0, 1.0],
                stds: vec![1.0, 1.0],
            },
            InjectionDistribution::GaussianMixture {
                weights: vec![1.5, -0.5],
                means: vec![0.0, 1.0],
                stds: vec![1.0, 1.0],
            },
        ];
        for dist in bad {
            let model = single_bus_model(dist, None);
            assert!(matches!(
                sample_scenarios(&model, 1, 0),
                Err(StochasticError::InvalidDistribution { .. })
            ));
        }
        let model = single_bus_model(
            InjectionDistribution::Gaussian { mean: 0.0, std: 1.0 },
            Some((50.0, 60.0)),
        );
        assert!(sample_scenarios(&model, 1, 0).is_err());
        let model = single_bus_model(InjectionDistribution::Gaussian { mean: 0.0, std: 1.0 }, None);
        assert_eq!(sample_scenarios(&model, 0, 0), Err(StochasticError::EmptySample));
    }

    #[test]
    fn stderr_shrinks_like_inverse_root() {
        let values: Vec<f64> = (0..400).map(|k| (k % 7) as f64).collect();
        let small = Estimate::from_values(&values[..100]).stderr;
        let large = Estimate::from_values(&values).stderr;
        assert!((small / large - 2.0).abs() < 0.1, "{}", small / large);
        assert_eq!(Estimate::from_values(&[3.0]).stderr, 0.0);
    }
}
