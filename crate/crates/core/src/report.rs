//! Result files: run summaries, step traces, cost maps and method
//! comparisons. Every number is rounded to 9 significant digits before it is
//! written so that identical runs produce identical bytes.

use std::io::Write;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::netmodel::{Case, CaseSystem};
use crate::oracle::CostMap;
use crate::scheduler::{ScheduleTrace, SchedulerConfig};

pub const SIGNIFICANT_DIGITS: usize = 9;

#[derive(Debug, Error)]
pub enum ReportError {
    #[error("summaries come from different cases ({0} vs {1})")]
    MismatchedCase(String, String),
    #[error("need at least two summaries to compare, got {0}")]
    TooFew(usize),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// `x` rounded to [`SIGNIFICANT_DIGITS`] significant digits. Negative zero
/// becomes zero.
pub fn round_sig(x: f64) -> f64 {
    if !x.is_finite() || x == 0.0 {
        return if x == 0.0 { 0.0 } else { x };
    }
    let r: f64 = format!("{:.*e}", SIGNIFICANT_DIGITS - 1, x).parse().unwrap();
    if r == 0.0 {
        0.0
    } else {
        r
    }
}

fn round_all(v: &[f64]) -> Vec<f64> {
    v.iter().copied().map(round_sig).collect()
}

fn fmt_num(x: f64) -> String {
    format!("{}", round_sig(x))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub case_name: String,
    pub case_hash: String,
    pub mode: String,
    pub seed: u64,
    pub samples: usize,
    pub epsilon: f64,
    pub bisection_tol: f64,
    pub max_cycles: usize,
    pub horizon: usize,
    pub q0: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AreaPrices {
    pub area: String,
    /// Interface id per price, in the area's slot order.
    pub interfaces: Vec<String>,
    pub prices: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub provenance: Provenance,
    pub status: String,
    pub rounds: usize,
    pub updates: usize,
    pub interfaces: Vec<String>,
    pub q: Vec<f64>,
    pub expected_cost: f64,
    pub cost_stderr: f64,
    pub excluded_samples: usize,
    pub prices: Vec<AreaPrices>,
    /// Expected price on the from side minus the to side, per interface.
    pub price_gaps: Vec<f64>,
    pub at_bound: Vec<bool>,
}

/// Expected price difference across each interface.
pub fn price_gaps(system: &CaseSystem, prices: &[Vec<f64>]) -> Vec<f64> {
    system
        .interfaces
        .iter()
        .enumerate()
        .map(|(i, f)| {
            let from = prices[f.from_area][system.areas[f.from_area].slot_of(i).unwrap()];
            let to = prices[f.to_area][system.areas[f.to_area].slot_of(i).unwrap()];
            from - to
        })
        .collect()
}

impl Summary {
    pub fn new(case: &Case, cfg: &SchedulerConfig, q0: &[f64], trace: &ScheduleTrace) -> Self {
        let system = &case.system;
        let q = trace.final_q();
        let prices = system
            .areas
            .iter()
            .zip(&trace.terminal.prices)
            .map(|(a, p)| AreaPrices {
                area: a.id.clone(),
                interfaces: a
                    .interfaces
                    .iter()
                    .map(|s| system.interfaces[s.interface].id.clone())
                    .collect(),
                prices: round_all(p),
            })
            .collect();
        Self {
            provenance: Provenance {
                case_name: system.name.clone(),
                case_hash: case.hash.clone(),
                mode: trace.mode.as_str().to_string(),
                seed: cfg.seed,
                samples: cfg.samples,
                epsilon: cfg.epsilon,
                bisection_tol: cfg.bisection_tol,
                max_cycles: cfg.max_cycles,
                horizon: cfg.horizon,
                q0: round_all(q0),
            },
            status: serde_json::to_value(trace.status)
                .unwrap()
                .as_str()
                .unwrap()
                .to_string(),
            rounds: trace.rounds,
            updates: trace.steps.len(),
            interfaces: system.interfaces.iter().map(|f| f.id.clone()).collect(),
            q: round_all(q),
            expected_cost: round_sig(trace.terminal.cost.mean),
            cost_stderr: round_sig(trace.terminal.cost.stderr),
            excluded_samples: trace.terminal.cost.excluded,
            prices,
            price_gaps: round_all(&price_gaps(system, &trace.terminal.prices)),
            at_bound: system
                .interfaces
                .iter()
                .zip(q)
                .map(|(f, &v)| v <= f.lower_bound || v >= f.capacity)
                .collect(),
        }
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).unwrap();
        s.push('\n');
        s
    }

    pub fn max_price_gap(&self) -> f64 {
        self.price_gaps.iter().fold(0.0, |m, g| m.max(g.abs()))
    }
}

/// One row per update: `step, round, interface, q_<id>..., expected_cost,
/// gap, pi_<area>_<id>...`.
pub fn write_trace_csv<W: Write>(out: W, system: &CaseSystem, trace: &ScheduleTrace) -> Result<(), ReportError> {
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec!["step".to_string(), "round".into(), "interface".into()];
    header.extend(system.interfaces.iter().map(|f| format!("q_{}", f.id)));
    header.push("expected_cost".into());
    header.push("gap".into());
    for a in &system.areas {
        for s in &a.interfaces {
            header.push(format!("pi_{}_{}", a.id, system.interfaces[s.interface].id));
        }
    }
    w.write_record(&header)?;
    for r in &trace.steps {
        let mut row = vec![
            r.step.to_string(),
            r.round.to_string(),
            system.interfaces[r.interface].id.clone(),
        ];
        row.extend(r.q.iter().map(|&v| fmt_num(v)));
        row.push(fmt_num(r.expected_cost));
        row.push(fmt_num(r.gap));
        row.extend(r.prices.iter().flatten().map(|&v| fmt_num(v)));
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

/// `q_<id>..., expected_cost` per grid point; infeasible points have an empty
/// cost field.
pub fn write_costmap_csv<W: Write>(out: W, system: &CaseSystem, map: &CostMap) -> Result<(), ReportError> {
    let mut w = csv::Writer::from_writer(out);
    let mut header: Vec<String> = system.interfaces.iter().map(|f| format!("q_{}", f.id)).collect();
    header.push("expected_cost".into());
    w.write_record(&header)?;
    for (p, c) in map.points.iter().zip(&map.costs) {
        let mut row: Vec<String> = p.iter().map(|&v| fmt_num(v)).collect();
        row.push(c.map(fmt_num).unwrap_or_default());
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CostMapSummary {
    pub case_name: String,
    pub case_hash: String,
    pub seed: u64,
    pub samples: usize,
    pub interfaces: Vec<String>,
    pub base: Vec<f64>,
    pub axes: Vec<AxisSummary>,
    pub points: usize,
    pub infeasible_points: usize,
    pub argmin: Vec<f64>,
    pub min_cost: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AxisSummary {
    pub interface: String,
    pub lo: f64,
    pub hi: f64,
    pub step: f64,
}

impl CostMapSummary {
    pub fn new(case: &Case, seed: u64, samples: usize, map: &CostMap) -> Self {
        let system = &case.system;
        Self {
            case_name: system.name.clone(),
            case_hash: case.hash.clone(),
            seed,
            samples,
            interfaces: system.interfaces.iter().map(|f| f.id.clone()).collect(),
            base: round_all(&map.spec.base),
            axes: map
                .spec
                .axes
                .iter()
                .map(|a| AxisSummary {
                    interface: system.interfaces[a.interface].id.clone(),
                    lo: round_sig(a.lo),
                    hi: round_sig(a.hi),
                    step: round_sig(a.step),
                })
                .collect(),
            points: map.points.len(),
            infeasible_points: map.costs.iter().filter(|c| c.is_none()).count(),
            argmin: round_all(&map.argmin),
            min_cost: round_sig(map.min_cost),
        }
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).unwrap();
        s.push('\n');
        s
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MethodReport {
    pub label: String,
    pub mode: String,
    pub status: String,
    pub q: Vec<f64>,
    pub prices: Vec<AreaPrices>,
    pub price_gaps: Vec<f64>,
    pub max_price_gap: f64,
    pub in_sample_cost: f64,
    pub out_of_sample_cost: f64,
    pub out_of_sample_stderr: f64,
    /// Differences to the first method.
    pub delta_q: Vec<f64>,
    pub delta_out_of_sample_cost: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Comparison {
    pub case_name: String,
    pub case_hash: String,
    pub out_of_sample_seed: u64,
    pub out_of_sample_samples: usize,
    pub methods: Vec<MethodReport>,
}

/// Out-of-sample score for one schedule.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Score {
    pub mean: f64,
    pub stderr: f64,
}

impl Comparison {
    /// Builds the comparison from labelled summaries and their out-of-sample
    /// scores, which must all come from one case.
    pub fn new(
        summaries: &[(String, Summary)],
        scores: &[Score],
        seed: u64,
        samples: usize,
    ) -> Result<Self, ReportError> {
        if summaries.len() < 2 {
            return Err(ReportError::TooFew(summaries.len()));
        }
        let first = &summaries[0].1;
        for (_, s) in &summaries[1..] {
            if s.provenance.case_hash != first.provenance.case_hash {
                return Err(ReportError::MismatchedCase(
                    first.provenance.case_hash.clone(),
                    s.provenance.case_hash.clone(),
                ));
            }
        }
        let base_cost = scores[0].mean;
        let methods = summaries
            .iter()
            .zip(scores)
            .map(|((label, s), score)| MethodReport {
                label: label.clone(),
                mode: s.provenance.mode.clone(),
                status: s.status.clone(),
                q: s.q.clone(),
                prices: s.prices.clone(),
                price_gaps: s.price_gaps.clone(),
                max_price_gap: s.max_price_gap(),
                in_sample_cost: s.expected_cost,
                out_of_sample_cost: round_sig(score.mean),
                out_of_sample_stderr: round_sig(score.stderr),
                delta_q: s.q.iter().zip(&first.q).map(|(a, b)| round_sig(a - b)).collect(),
                delta_out_of_sample_cost: round_sig(score.mean - base_cost),
            })
            .collect();
        Ok(Self {
            case_name: first.provenance.case_name.clone(),
            case_hash: first.provenance.case_hash.clone(),
            out_of_sample_seed: seed,
            out_of_sample_samples: samples,
            methods,
        })
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).unwrap();
        s.push('\n');
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn rounding() {
        assert_eq!(round_sig(22500.000000001), 22500.0);
        assert_eq!(round_sig(1.0 / 3.0), 0.333333333);
        assert_eq!(round_sig(-0.0), 0.0);
        assert_eq!(round_sig(-1.23456789012e-7), -1.23456789e-7);
        assert_eq!(fmt_num(50.0), "50");
    }

    proptest! {
        #[test]
        fn rounding_is_idempotent(x in -1e12f64..1e12) {
            let r = round_sig(x);
            prop_assert_eq!(round_sig(r), r);
            prop_assert!((r - x).abs() <= 1e-8 * x.abs());
        }
    }
}
