//! Regional second-stage dispatch and proxy-bus pricing.
//!
//! For a fixed outbound interchange `q_n` and net-load realization `d_n`,
//! area `n` solves
//!
//! ```text
//!     min  sum_j 1/2 h_j g_j^2 + l_j g_j
//!     s.t. 1'(d_n - g_n) + 1'q_n = 0                      (lambda)
//!          A_n (d_n - g_n) + B_n q_n <= F_n                (mu)
//!          A_n (g_n - d_n) - B_n q_n <= F_n                (mu_mirror)
//!          g_min <= g_n <= g_max
//! ```
//!
//! and prices its proxy buses as `pi_n = 1 lambda + B_n' (mu - mu_mirror)`,
//! which equals the gradient of the optimal cost with respect to `q_n`.

use nalgebra::{DMatrix, DVector};
use thiserror::Error;

use crate::netmodel::{project_interchange, Area, Network, ShiftFactors};
use crate::qp::{detect_degeneracy, solve_qp, Degeneracy, QpError, QpStatus, QuadraticProgram};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DispatchError {
    #[error("area {area}: dispatch infeasible ({certificate})")]
    Infeasible { area: String, certificate: String },
    #[error("area {area}: {source}")]
    Solver {
        area: String,
        #[source]
        source: QpError,
    },
}

impl DispatchError {
    pub fn area(&self) -> &str {
        match self {
            DispatchError::Infeasible { area, .. } | DispatchError::Solver { area, .. } => area,
        }
    }
}

/// Dispatch QP together with the row layout needed to read prices back.
#[derive(Debug, Clone)]
pub struct DispatchQp {
    pub qp: QuadraticProgram,
    /// Branch indices with a thermal limit, in row order.
    pub monitored: Vec<usize>,
}

impl DispatchQp {
    /// Human-readable name of inequality row `row`.
    pub fn describe_row(&self, area: &Area, row: usize) -> String {
        let nm = self.monitored.len();
        let ng = area.generators.len();
        if row < nm {
            format!(
                "branch {} limit (reverse direction)",
                area.branches[self.monitored[row]].id
            )
        } else if row < 2 * nm {
            format!("branch {} limit", area.branches[self.monitored[row - nm]].id)
        } else if row < 2 * nm + ng {
            format!("generator {} upper bound", area.generators[row - 2 * nm].id)
        } else {
            format!("generator {} lower bound", area.generators[row - 2 * nm - ng].id)
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DispatchSolution {
    /// MW per generator.
    pub g: Vec<f64>,
    /// Optimal cost `C_n*(q_n, d_n)`, $.
    pub cost: f64,
    /// Energy price, $/MW: marginal cost of load at the slack bus.
    pub lambda: f64,
    /// Duals of `A(d - g) + B q <= F` (flow limit in the `to -> from`
    /// direction), one per monitored branch.
    pub mu: Vec<f64>,
    /// Duals of the mirrored rows `A(g - d) - B q <= F` (flow limit in the
    /// `from -> to` direction).
    pub mu_mirror: Vec<f64>,
    pub monitored: Vec<usize>,
    /// Proxy-bus prices, one per area interface, $/MW.
    pub pi: Vec<f64>,
    /// Inequality rows of [`build_dispatch_qp`] in the solver's final working set.
    pub active: Vec<usize>,
    pub degeneracy: Degeneracy,
}

pub fn build_dispatch_qp(area: &Area, sf: &ShiftFactors, q_n: &[f64], d_n: &[f64]) -> DispatchQp {
    let ng = area.generators.len();
    let monitored: Vec<usize> = area
        .branches
        .iter()
        .enumerate()
        .filter_map(|(k, br)| br.limit.map(|_| k))
        .collect();
    let nm = monitored.len();

    let h = DMatrix::from_diagonal(&DVector::from_iterator(
        ng,
        area.generators.iter().map(|g| g.cost_quadratic),
    ));
    let l = DVector::from_iterator(ng, area.generators.iter().map(|g| g.cost_linear));

    let a_eq = DMatrix::from_element(1, ng, 1.0);
    let b_eq = DVector::from_element(1, d_n.iter().sum::<f64>() + q_n.iter().sum::<f64>());

    let m = 2 * nm + 2 * ng;
    let mut a_in = DMatrix::zeros(m, ng);
    let mut b_in = DVector::zeros(m);
    for (r, &k) in monitored.iter().enumerate() {
        let limit = area.branches[k].limit.expect("monitored branch has a limit");
        let ad: f64 = sf.a.row(k).iter().zip(d_n).map(|(s, d)| s * d).sum();
        let bq: f64 = sf.b.row(k).iter().zip(q_n).map(|(s, q)| s * q).sum();
        for (j, gen) in area.generators.iter().enumerate() {
            let s = sf.a[(k, gen.bus)];
            a_in[(r, j)] = -s;
            a_in[(nm + r, j)] = s;
        }
        b_in[r] = limit - ad - bq;
        b_in[nm + r] = limit + ad + bq;
    }
    for (j, gen) in area.generators.iter().enumerate() {
        a_in[(2 * nm + j, j)] = 1.0;
        b_in[2 * nm + j] = gen.g_max;
        a_in[(2 * nm + ng + j, j)] = -1.0;
        b_in[2 * nm + ng + j] = -gen.g_min;
    }

    DispatchQp {
        qp: QuadraticProgram::unconstrained(h, l)
            .with_equalities(a_eq, b_eq)
            .with_inequalities(a_in, b_in),
        monitored,
    }
}

pub fn solve_dispatch(
    area: &Area,
    sf: &ShiftFactors,
    q_n: &[f64],
    d_n: &[f64],
) -> Result<DispatchSolution, DispatchError> {
    let built = build_dispatch_qp(area, sf, q_n, d_n);
    let sol = solve_qp(&built.qp).map_err(|source| DispatchError::Solver {
        area: area.id.clone(),
        source,
    })?;
    if let QpStatus::Infeasible {
        constraint,
        conflicting,
    } = &sol.status
    {
        let mut parts = vec![built.describe_row(area, *constraint)];
        parts.extend(conflicting.iter().map(|&r| built.describe_row(area, r)));
        parts.push("power balance".into());
        return Err(DispatchError::Infeasible {
            area: area.id.clone(),
            certificate: format!("cannot satisfy together: {}", parts.join(", ")),
        });
    }

    let nm = built.monitored.len();
    let lambda = -sol.dual_eq[0];
    let mu: Vec<f64> = sol.dual_in.iter().take(nm).copied().collect();
    let mu_mirror: Vec<f64> = sol.dual_in.iter().skip(nm).take(nm).copied().collect();
    let pi = (0..area.interfaces.len())
        .map(|j| {
            lambda
                + built
                    .monitored
                    .iter()
                    .enumerate()
                    .map(|(r, &k)| sf.b[(k, j)] * (mu[r] - mu_mirror[r]))
                    .sum::<f64>()
        })
        .collect();

    Ok(DispatchSolution {
        g: sol.x.iter().copied().collect(),
        cost: sol.objective,
        lambda,
        mu,
        mu_mirror,
        monitored: built.monitored.clone(),
        pi,
        degeneracy: detect_degeneracy(&built.qp, &sol),
        active: sol.active_set,
    })
}

/// Total system cost `sum_n C_n*(q_n, d_n)` for one all-area realization.
pub fn total_cost(net: &Network, q: &[f64], d: &[Vec<f64>]) -> Result<f64, DispatchError> {
    let mut total = 0.0;
    for (n, area) in net.system.areas.iter().enumerate() {
        let q_n = project_interchange(q, area);
        total += solve_dispatch(area, &net.shift[n], &q_n, &d[n])?.cost;
    }
    Ok(total)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::netmodel::compute_shift_factors;
    use crate::netmodel::{parse_case, AreaInterface, Branch, Bus, Generator, Sign};
    use approx::assert_abs_diff_eq;

    fn gen(id: &str, bus: usize, h: f64, l: f64, g_min: f64, g_max: f64) -> Generator {
        Generator {
            id: id.into(),
            bus,
            cost_quadratic: h,
            cost_linear: l,
            g_min,
            g_max,
        }
    }

    fn one_bus(h: f64, l: f64, g_min: f64) -> Area {
        Area {
            id: "A".into(),
            buses: vec![Bus {
                id: "a1".into(),
                area: 0,
                base_load: 100.0,
            }],
            branches: vec![],
            generators: vec![gen("g", 0, h, l, g_min, 1e4)],
            slack: 0,
            interfaces: vec![AreaInterface {
                interface: 0,
                sign: Sign::Outbound,
                proxy_bus: 0,
            }],
        }
    }

    /// Cheap generator at bus 1, expensive one and the load at bus 2, one
    /// 100 MW line between them, proxy at bus 1.
    fn two_bus() -> Area {
        Area {
            id: "C".into(),
            buses: vec![
                Bus {
                    id: "c1".into(),
                    area: 0,
                    base_load: 0.0,
                },
                Bus {
                    id: "c2".into(),
                    area: 0,
                    base_load: 250.0,
                },
            ],
            branches: vec![Branch {
                id: "c1-c2".into(),
                from: 0,
                to: 1,
                susceptance: 10.0,
                limit: Some(100.0),
            }],
            generators: vec![
                gen("cheap", 0, 0.02, 10.0, 0.0, 500.0),
                gen("dear", 1, 0.05, 30.0, 0.0, 500.0),
            ],
            slack: 1,
            interfaces: vec![AreaInterface {
                interface: 0,
                sign: Sign::Outbound,
                proxy_bus: 0,
            }],
        }
    }

    #[test]
    fn single_bus_balance_fixes_output() {
        let area = one_bus(1.0, 0.0, -1e4);
        let sf = compute_shift_factors(&area).unwrap();
        let sol = solve_dispatch(&area, &sf, &[50.0], &[100.0]).unwrap();
        assert_abs_diff_eq!(sol.g[0], 150.0, epsilon = 1e-9);
        assert_abs_diff_eq!(sol.lambda, 150.0, epsilon = 1e-9);
        assert!(sol.mu.is_empty());
        assert_abs_diff_eq!(sol.pi[0], 150.0, epsilon = 1e-9);
        assert_abs_diff_eq!(sol.cost, 0.5 * 150.0 * 150.0, epsilon = 1e-6);

        let sol = solve_dispatch(&area, &sf, &[-50.0], &[100.0]).unwrap();
        assert_abs_diff_eq!(sol.g[0], 50.0, epsilon = 1e-9);
        assert_abs_diff_eq!(sol.pi[0], 50.0, epsilon = 1e-9);
    }

    #[test]
    fn idle_system_costs_nothing() {
        let area = one_bus(1.0, 2.0, 0.0);
        let sf = compute_shift_factors(&area).unwrap();
        let sol = solve_dispatch(&area, &sf, &[0.0], &[0.0]).unwrap();
        assert_abs_diff_eq!(sol.g[0], 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(sol.cost, 0.0, epsilon = 1e-12);
    }

    #[test]
    fn constraint_rows_carry_shift_factors() {
        let area = two_bus();
        let sf = compute_shift_factors(&area).unwrap();
        let d = [0.0, 250.0];
        let q = [20.0];
        let built = build_dispatch_qp(&area, &sf, &q, &d);
        // Hand-assembled: flow(1->2) = (g1 - d1) - q with unit shift factor at
        // bus 1 and zero at the slack bus.
        let a_in = &built.qp.a_in;
        let b_in = &built.qp.b_in;
        assert_eq!(a_in.nrows(), 6);
        let rows = [
            (a_in[(0, 0)], -1.0),
            (a_in[(0, 1)], 0.0),
            (a_in[(1, 0)], 1.0),
            (a_in[(1, 1)], 0.0),
        ];
        for (got, want) in rows {
            assert_abs_diff_eq!(got, want, epsilon = 1e-12);
        }
        assert_abs_diff_eq!(b_in[0], 100.0 - 0.0 - 20.0);
        assert_abs_diff_eq!(b_in[1], 100.0 + 0.0 + 20.0);
        assert_eq!(built.qp.b_eq[0], 270.0);
        assert_eq!((b_in[2], b_in[3], b_in[4], b_in[5]), (500.0, 500.0, 0.0, 0.0));
    }

    #[test]
    fn congestion_separates_proxy_price_from_energy_price() {
        let area = two_bus();
        let sf = compute_shift_factors(&area).unwrap();
        let d = [0.0, 250.0];
        let sol = solve_dispatch(&area, &sf, &[0.0], &d).unwrap();
        // Line limit binds: cheap unit stuck at 100 MW.
        assert_abs_diff_eq!(sol.g[0], 100.0, epsilon = 1e-9);
        assert!(sol.mu_mirror[0] > 1.0);
        assert!((sol.pi[0] - sol.lambda).abs() > 1.0);
        // Proxy sits with the cheap unit; its price is the cheap marginal cost.
        assert_abs_diff_eq!(sol.pi[0], 0.02 * 100.0 + 10.0, epsilon = 1e-9);
        assert_abs_diff_eq!(sol.lambda, 0.05 * 150.0 + 30.0, epsilon = 1e-9);

        let delta = 1e-3;
        let up = solve_dispatch(&area, &sf, &[delta], &d).unwrap().cost;
        let down = solve_dispatch(&area, &sf, &[-delta], &d).unwrap().cost;
        let fd = (up - down) / (2.0 * delta);
        assert!((fd - sol.pi[0]).abs() <= 1e-4 * sol.pi[0].abs());
    }

    #[test]
    fn insufficient_capacity_is_infeasible() {
        let area = two_bus();
        let sf = compute_shift_factors(&area).unwrap();
        let err = solve_dispatch(&area, &sf, &[0.0], &[0.0, 1200.0]).unwrap_err();
        match err {
            DispatchError::Infeasible { area, certificate } => {
                assert_eq!(area, "C");
                assert!(certificate.contains("generator"), "{certificate}");
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn symmetric_two_area_totals() {
        let case = parse_case(include_str!("../../../fixtures/two_area.case")).unwrap();
        let net = Network::new(case.system).unwrap();
        let d = vec![vec![100.0], vec![200.0]];
        assert_abs_diff_eq!(total_cost(&net, &[50.0], &d).unwrap(), 22500.0, epsilon = 1e-6);
        assert_abs_diff_eq!(total_cost(&net, &[0.0], &d).unwrap(), 25000.0, epsilon = 1e-6);
    }
}
