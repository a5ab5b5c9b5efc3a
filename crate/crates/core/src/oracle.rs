//! Brute-force checks that do not go through the schedulers: exhaustive
//! expected-cost maps, finite-difference envelope checks and midpoint
//! convexity probes.

use std::collections::HashMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::dispatch::{solve_dispatch, DispatchError};
use crate::netmodel::{project_interchange, Area, CaseSystem, Network, ShiftFactors};
use crate::qp::Degeneracy;
use crate::stochastic::{ScenarioSet, MAX_EXCLUDED_FRACTION};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum OracleError {
    #[error("invalid grid: {0}")]
    Grid(String),
    #[error("every grid point is infeasible")]
    AllInfeasible,
    #[error("dispatch is degenerate at the base point; envelope check does not apply")]
    Degenerate,
    #[error("active set changes within +/-delta along coordinate {coord}; point straddles a kink")]
    Kink { coord: usize },
    #[error("no feasible probe segment after {attempts} attempts")]
    ProbeExhausted { attempts: usize },
    #[error(transparent)]
    Dispatch(#[from] DispatchError),
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GridAxis {
    pub interface: usize,
    pub lo: f64,
    pub hi: f64,
    pub step: f64,
}

impl GridAxis {
    /// `lo, lo + step, ...` up to `hi` (inclusive within rounding).
    pub fn points(&self) -> Vec<f64> {
        let count = ((self.hi - self.lo) / self.step + 1e-9).floor() as usize;
        (0..=count).map(|k| self.lo + k as f64 * self.step).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GridSpec {
    /// Interchange used for interfaces without an axis.
    pub base: Vec<f64>,
    pub axes: Vec<GridAxis>,
}

impl GridSpec {
    /// Every interface over its full bounds. Exhaustive grids are limited to
    /// two interfaces; use [`GridSpec::slice`] beyond that.
    pub fn full(system: &CaseSystem, step: f64) -> Result<Self, OracleError> {
        if system.interface_count() > 2 {
            return Err(OracleError::Grid(format!(
                "exhaustive grid over {} interfaces; use a coordinate slice",
                system.interface_count()
            )));
        }
        let axes = system
            .interfaces
            .iter()
            .enumerate()
            .map(|(i, f)| GridAxis {
                interface: i,
                lo: f.lower_bound,
                hi: f.capacity,
                step,
            })
            .collect();
        Self::slice(system, vec![0.0; system.interface_count()], axes)
    }

    /// Grid over the given axes with the remaining interfaces fixed at `base`.
    pub fn slice(system: &CaseSystem, base: Vec<f64>, axes: Vec<GridAxis>) -> Result<Self, OracleError> {
        if base.len() != system.interface_count() {
            return Err(OracleError::Grid("base point has the wrong dimension".into()));
        }
        for ax in &axes {
            let Some(iface) = system.interfaces.get(ax.interface) else {
                return Err(OracleError::Grid(format!("no interface {}", ax.interface)));
            };
            if !(ax.step > 0.0) || !(ax.lo <= ax.hi) {
                return Err(OracleError::Grid(format!(
                    "axis {} needs lo <= hi and step > 0",
                    ax.interface
                )));
            }
            if ax.lo < iface.lower_bound || ax.hi > iface.capacity {
                return Err(OracleError::Grid(format!(
                    "axis {} leaves the interface bounds",
                    ax.interface
                )));
            }
        }
        Ok(Self { base, axes })
    }

    /// Square window of half-width `half` around `center`, clipped to bounds.
    pub fn window(system: &CaseSystem, center: &[f64], half: f64, step: f64) -> Result<Self, OracleError> {
        let axes = system
            .interfaces
            .iter()
            .enumerate()
            .map(|(i, f)| {
                let lo = (center[i] - half).max(f.lower_bound);
                GridAxis {
                    interface: i,
                    lo,
                    hi: (center[i] + half).min(f.capacity),
                    step,
                }
            })
            .collect();
        Self::slice(system, center.to_vec(), axes)
    }

    /// All grid points in lexicographic order (first axis slowest).
    pub fn points(&self) -> Vec<Vec<f64>> {
        let mut out = vec![self.base.clone()];
        for ax in &self.axes {
            let values = ax.points();
            out = out
                .into_iter()
                .flat_map(|p| {
                    values.iter().map(move |&v| {
                        let mut p = p.clone();
                        p[ax.interface] = v;
                        p
                    })
                })
                .collect();
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CostMap {
    pub spec: GridSpec,
    pub points: Vec<Vec<f64>>,
    /// Expected cost per point; `None` marks an infeasible point.
    pub costs: Vec<Option<f64>>,
    pub argmin_index: usize,
    pub argmin: Vec<f64>,
    pub min_cost: f64,
}

impl CostMap {
    pub fn cost_at(&self, q: &[f64]) -> Option<f64> {
        self.points.iter().position(|p| p == q).and_then(|k| self.costs[k])
    }
}

/// Expected total cost at every grid point, with the scenario set held fixed.
/// Area dispatches are shared between grid points that project to the same
/// area interchange. Ties in the minimum go to the lexicographically smallest
/// point.
pub fn grid_search(net: &Network, scenarios: &ScenarioSet, spec: &GridSpec) -> Result<CostMap, OracleError> {
    let points = spec.points();
    let n_areas = net.system.area_count();

    // Unique (area, q_n) jobs.
    let mut job_index: HashMap<(usize, Vec<u64>), usize> = HashMap::new();
    let mut jobs: Vec<(usize, Vec<f64>)> = Vec::new();
    let mut point_jobs = Vec::with_capacity(points.len());
    for q in &points {
        let ids: Vec<usize> = (0..n_areas)
            .map(|n| {
                let q_n = project_interchange(q, &net.system.areas[n]);
                let key = (n, q_n.iter().map(|v| v.to_bits()).collect());
                *job_index.entry(key).or_insert_with(|| {
                    jobs.push((n, q_n));
                    jobs.len() - 1
                })
            })
            .collect();
        point_jobs.push(ids);
    }

    // Areas without uncertainty see the same net load in every sample; solve
    // each distinct area load once.
    let mut distinct: Vec<Vec<&[f64]>> = vec![vec![]; n_areas];
    let mut sample_slot: Vec<Vec<usize>> = vec![vec![]; n_areas];
    for n in 0..n_areas {
        let mut seen: HashMap<Vec<u64>, usize> = HashMap::new();
        for d in &scenarios.samples {
            let key = d[n].iter().map(|v| v.to_bits()).collect();
            let slot = *seen.entry(key).or_insert_with(|| {
                distinct[n].push(&d[n]);
                distinct[n].len() - 1
            });
            sample_slot[n].push(slot);
        }
    }

    let per_job: Vec<Result<Vec<Option<f64>>, OracleError>> = jobs
        .par_iter()
        .map(|(n, q_n)| {
            let (area, sf) = net.area(*n);
            distinct[*n]
                .iter()
                .map(|d_n| match solve_dispatch(area, sf, q_n, d_n) {
                    Ok(sol) if sol.degeneracy == Degeneracy::None => Ok(Some(sol.cost)),
                    Ok(_) | Err(DispatchError::Infeasible { .. }) => Ok(None),
                    Err(e) => Err(e.into()),
                })
                .collect()
        })
        .collect();
    let per_job = per_job.into_iter().collect::<Result<Vec<_>, _>>()?;

    let total = scenarios.len();
    let costs: Vec<Option<f64>> = point_jobs
        .iter()
        .map(|ids| {
            let mut values = Vec::with_capacity(total);
            for s in 0..total {
                let mut sum = 0.0;
                let mut ok = true;
                for (n, &j) in ids.iter().enumerate() {
                    match per_job[j][sample_slot[n][s]] {
                        Some(c) => sum += c,
                        None => {
                            ok = false;
                            break;
                        }
                    }
                }
                if ok {
                    values.push(sum);
                }
            }
            let excluded = total - values.len();
            if values.is_empty() || excluded as f64 > MAX_EXCLUDED_FRACTION * total as f64 {
                None
            } else {
                Some(values.iter().sum::<f64>() / values.len() as f64)
            }
        })
        .collect();

    let mut best: Option<(usize, f64)> = None;
    for (k, c) in costs.iter().enumerate() {
        if let Some(c) = *c {
            if best.is_none_or(|(_, b)| c < b) {
                best = Some((k, c));
            }
        }
    }
    let (argmin_index, min_cost) = best.ok_or(OracleError::AllInfeasible)?;
    Ok(CostMap {
        spec: spec.clone(),
        argmin: points[argmin_index].clone(),
        points,
        costs,
        argmin_index,
        min_cost,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EnvelopeReport {
    /// Central-difference derivative of the optimal cost per coordinate.
    pub finite_difference: Vec<f64>,
    pub prices: Vec<f64>,
    /// Largest `|fd - pi| / max(1, |pi|)`.
    pub max_relative_deviation: f64,
}

/// Compares central differences of `C*(q_n, d_n)` in each coordinate of
/// `q_n` against the proxy prices. Points that are degenerate, or whose
/// active set differs at `q_n +/- delta`, are reported as errors rather than
/// checked.
pub fn envelope_check(
    area: &Area,
    sf: &ShiftFactors,
    q_n: &[f64],
    d_n: &[f64],
    delta: f64,
) -> Result<EnvelopeReport, OracleError> {
    let center = solve_dispatch(area, sf, q_n, d_n)?;
    if center.degeneracy != Degeneracy::None {
        return Err(OracleError::Degenerate);
    }
    let mut fd = Vec::with_capacity(q_n.len());
    let mut worst: f64 = 0.0;
    for j in 0..q_n.len() {
        let mut up = q_n.to_vec();
        let mut down = q_n.to_vec();
        up[j] += delta;
        down[j] -= delta;
        let s_up = solve_dispatch(area, sf, &up, d_n)?;
        let s_down = solve_dispatch(area, sf, &down, d_n)?;
        if s_up.active != center.active || s_down.active != center.active {
            return Err(OracleError::Kink { coord: j });
        }
        let d = (s_up.cost - s_down.cost) / (2.0 * delta);
        worst = worst.max((d - center.pi[j]).abs() / center.pi[j].abs().max(1.0));
        fd.push(d);
    }
    Ok(EnvelopeReport {
        finite_difference: fd,
        prices: center.pi,
        max_relative_deviation: worst,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ProbeReport {
    /// Largest `f((a + b) / 2) - (f(a) + f(b)) / 2` seen; positive values
    /// violate convexity.
    pub worst_violation: f64,
    pub trials: usize,
    pub resampled: usize,
}

/// Midpoint convexity probe of `f` over the box `[lo, hi]`. `f` returns
/// `None` where it is undefined; such segments are redrawn, up to
/// `10 * trials` draws in total.
pub fn convexity_probe<F>(f: F, lo: &[f64], hi: &[f64], trials: usize, seed: u64) -> Result<ProbeReport, OracleError>
where
    F: Fn(&[f64]) -> Option<f64>,
{
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let draw = |rng: &mut ChaCha8Rng| -> Vec<f64> {
        lo.iter()
            .zip(hi)
            .map(|(a, b)| if a == b { *a } else { rng.random_range(*a..*b) })
            .collect()
    };
    let max_attempts = 10 * trials.max(1);
    let mut worst = f64::NEG_INFINITY;
    let (mut done, mut attempts) = (0, 0);
    while done < trials {
        if attempts >= max_attempts {
            return Err(OracleError::ProbeExhausted { attempts });
        }
        attempts += 1;
        let a = draw(&mut rng);
        let b = draw(&mut rng);
        let mid: Vec<f64> = a.iter().zip(&b).map(|(x, y)| 0.5 * (x + y)).collect();
        let (Some(fa), Some(fb), Some(fm)) = (f(&a), f(&b), f(&mid)) else {
            continue;
        };
        worst = worst.max(fm - 0.5 * (fa + fb));
        done += 1;
    }
    Ok(ProbeReport {
        worst_violation: worst,
        trials,
        resampled: attempts - done,
    })
}
