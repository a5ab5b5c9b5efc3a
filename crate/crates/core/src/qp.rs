//! Dense strictly convex quadratic programming.
//!
//! Problems have the form
//!
//! ```text
//!     minimize     1/2 x' H x + l' x
//!     subject to   Aeq x  = beq
//!                  Ain x <= bin
//! ```
//!
//! and are solved with a dual active-set method (Goldfarb–Idnani style): start
//! from the equality-constrained minimizer, then repeatedly pull in the most
//! violated inequality, dropping working constraints whose multipliers would
//! turn negative. Every subproblem is solved through the Cholesky factor of `H`
//! and the Schur complement of the working set, so the multipliers come out
//! exactly rather than by post-hoc estimation.
//!
//! Dual sign convention, used everywhere downstream: the Lagrangian is
//!
//! ```text
//!     L = f(x) + dual_eq' (Aeq x - beq) + dual_in' (Ain x - bin)
//! ```
//!
//! so `dual_in >= 0` and `d(objective)/d(beq) = -dual_eq`.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use thiserror::Error;

/// Feasibility and stationarity tolerance.
pub const FEAS_TOL: f64 = 1e-8;
/// Tolerance of the rank and multiplier tests in [`detect_degeneracy`].
pub const DEGENERACY_TOL: f64 = 1e-8;

const SYMMETRY_TOL: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum QpError {
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("Hessian is not symmetric (max asymmetry {0:e})")]
    NotSymmetric(f64),
    #[error("Hessian is not positive definite")]
    NotPositiveDefinite,
    #[error("equality constraints are linearly dependent")]
    DependentEqualities,
    #[error("iteration limit of {0} exceeded")]
    IterationLimit(usize),
}

#[derive(Debug, Clone, PartialEq)]
pub struct QuadraticProgram {
    pub h: DMatrix<f64>,
    pub l: DVector<f64>,
    pub a_eq: DMatrix<f64>,
    pub b_eq: DVector<f64>,
    pub a_in: DMatrix<f64>,
    pub b_in: DVector<f64>,
}

impl QuadraticProgram {
    /// Unconstrained program `min 1/2 x'Hx + l'x`.
    pub fn unconstrained(h: DMatrix<f64>, l: DVector<f64>) -> Self {
        let n = l.len();
        Self {
            h,
            l,
            a_eq: DMatrix::zeros(0, n),
            b_eq: DVector::zeros(0),
            a_in: DMatrix::zeros(0, n),
            b_in: DVector::zeros(0),
        }
    }

    pub fn with_equalities(mut self, a_eq: DMatrix<f64>, b_eq: DVector<f64>) -> Self {
        self.a_eq = a_eq;
        self.b_eq = b_eq;
        self
    }

    pub fn with_inequalities(mut self, a_in: DMatrix<f64>, b_in: DVector<f64>) -> Self {
        self.a_in = a_in;
        self.b_in = b_in;
        self
    }

    pub fn dim(&self) -> usize {
        self.l.len()
    }

    pub fn objective(&self, x: &DVector<f64>) -> f64 {
        0.5 * x.dot(&(&self.h * x)) + self.l.dot(x)
    }

    /// Checks dimensions and symmetry. Positive definiteness is checked by the
    /// Cholesky factorization in [`solve_qp`].
    pub fn validate(&self) -> Result<(), QpError> {
        let n = self.dim();
        if self.h.nrows() != n || self.h.ncols() != n {
            return Err(QpError::Dimension(format!(
                "H is {}x{}, expected {n}x{n}",
                self.h.nrows(),
                self.h.ncols()
            )));
        }
        if self.a_eq.ncols() != n || self.a_eq.nrows() != self.b_eq.len() {
            return Err(QpError::Dimension(format!(
                "Aeq is {}x{} with {} right-hand sides",
                self.a_eq.nrows(),
                self.a_eq.ncols(),
                self.b_eq.len()
            )));
        }
        if self.a_in.ncols() != n || self.a_in.nrows() != self.b_in.len() {
            return Err(QpError::Dimension(format!(
                "Ain is {}x{} with {} right-hand sides",
                self.a_in.nrows(),
                self.a_in.ncols(),
                self.b_in.len()
            )));
        }
        let asym = (&self.h - self.h.transpose()).amax();
        if asym > SYMMETRY_TOL {
            return Err(QpError::NotSymmetric(asym));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum QpStatus {
    Optimal,
    /// No point satisfies the constraints. `constraint` is the inequality row
    /// that could not be added to the working set `conflicting`: its normal is
    /// a nonnegative combination of the working normals, which is a Farkas
    /// certificate of infeasibility.
    Infeasible {
        constraint: usize,
        conflicting: Vec<usize>,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct QpSolution {
    pub x: DVector<f64>,
    pub objective: f64,
    pub dual_eq: DVector<f64>,
    pub dual_in: DVector<f64>,
    /// Inequality rows in the final working set, ascending.
    pub active_set: Vec<usize>,
    pub status: QpStatus,
    pub iterations: usize,
}

impl QpSolution {
    pub fn is_optimal(&self) -> bool {
        self.status == QpStatus::Optimal
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Row {
    Eq(usize),
    In(usize),
}

struct Solver<'a> {
    qp: &'a QuadraticProgram,
    chol: Cholesky<f64, Dyn>,
}

impl Solver<'_> {
    fn normal(&self, row: Row) -> DVector<f64> {
        match row {
            Row::Eq(i) => self.qp.a_eq.row(i).transpose(),
            Row::In(j) => self.qp.a_in.row(j).transpose(),
        }
    }

    fn rhs(&self, row: Row) -> f64 {
        match row {
            Row::Eq(i) => self.qp.b_eq[i],
            Row::In(j) => self.qp.b_in[j],
        }
    }

    fn normals(&self, working: &[Row]) -> DMatrix<f64> {
        let n = self.qp.dim();
        let mut mat = DMatrix::zeros(n, working.len());
        for (c, &row) in working.iter().enumerate() {
            mat.set_column(c, &self.normal(row));
        }
        mat
    }

    /// Minimizer with every working row held as an equality, plus its
    /// multipliers. `None` when the working normals are dependent.
    fn equality_solve(&self, working: &[Row]) -> Option<(DVector<f64>, DVector<f64>)> {
        let hinv_l = self.chol.solve(&self.qp.l);
        if working.is_empty() {
            return Some((-hinv_l, DVector::zeros(0)));
        }
        let nmat = self.normals(working);
        let hinv_n = self.chol.solve(&nmat);
        let schur = nmat.transpose() * &hinv_n;
        let schur_chol = schur_cholesky(schur)?;
        let b = DVector::from_iterator(working.len(), working.iter().map(|&r| self.rhs(r)));
        let u = -schur_chol.solve(&(b + nmat.transpose() * &hinv_l));
        let x = -(hinv_l + hinv_n * &u);
        Some((x, u))
    }

    /// Primal step `z` and multiplier step `r` for pulling `normal` into the
    /// working set: `H z + N r + a = 0`, `N' z = 0`.
    fn step(&self, working: &[Row], a: &DVector<f64>) -> (DVector<f64>, DVector<f64>, f64) {
        let hinv_a = self.chol.solve(a);
        let scale = a.dot(&hinv_a);
        if working.is_empty() {
            return (-hinv_a, DVector::zeros(0), scale);
        }
        let nmat = self.normals(working);
        let hinv_n = self.chol.solve(&nmat);
        let schur = nmat.transpose() * &hinv_n;
        // The working set is kept independent, so the Schur complement is PD.
        let schur_chol = schur_cholesky(schur).expect("working set normals are independent");
        let r = -schur_chol.solve(&(nmat.transpose() * &hinv_a));
        let z = -(hinv_a + hinv_n * &r);
        (z, r, scale)
    }
}

fn schur_cholesky(schur: DMatrix<f64>) -> Option<Cholesky<f64, Dyn>> {
    let diag_max = schur.diagonal().amax();
    let chol = Cholesky::new(schur)?;
    let l = chol.l_dirty();
    let min_pivot = (0..l.nrows())
        .map(|i| l[(i, i)] * l[(i, i)])
        .fold(f64::INFINITY, f64::min);
    if min_pivot <= 1e-13 * diag_max.max(f64::MIN_POSITIVE) {
        return None;
    }
    Some(chol)
}

fn violation_scale(qp: &QuadraticProgram, j: usize, x: &DVector<f64>) -> f64 {
    let row = qp.a_in.row(j);
    let mut s = 1.0 + qp.b_in[j].abs();
    for (a, xi) in row.iter().zip(x.iter()) {
        s += (a * xi).abs();
    }
    s
}

/// Solves `qp`. Infeasibility is reported through [`QpStatus::Infeasible`];
/// malformed input, a non-PD Hessian, dependent equalities and the iteration
/// limit are errors.
pub fn solve_qp(qp: &QuadraticProgram) -> Result<QpSolution, QpError> {
    qp.validate()?;
    let chol = Cholesky::new(qp.h.clone()).ok_or(QpError::NotPositiveDefinite)?;
    let solver = Solver { qp, chol };
    let n_eq = qp.b_eq.len();
    let m = qp.b_in.len();
    let max_iter = 10 * (qp.dim() + m) + 20;

    let mut working: Vec<Row> = (0..n_eq).map(Row::Eq).collect();
    let (mut x, mut u) = solver.equality_solve(&working).ok_or(QpError::DependentEqualities)?;
    let mut in_working = vec![false; m];
    let mut iterations = 0;

    loop {
        // Most violated inequality enters; lowest index wins ties.
        let mut entering: Option<(usize, f64)> = None;
        for (j, _) in in_working.iter().enumerate().filter(|(_, w)| !**w) {
            let slack = qp.a_in.row(j).transpose().dot(&x) - qp.b_in[j];
            let rel = slack / violation_scale(qp, j, &x);
            if rel > 1e-13 && entering.is_none_or(|(_, best)| rel > best) {
                entering = Some((j, rel));
            }
        }
        let Some((p, _)) = entering else { break };
        let a_p = solver.normal(Row::In(p));
        let mut u_p = 0.0;

        loop {
            iterations += 1;
            if iterations > max_iter {
                return Err(QpError::IterationLimit(max_iter));
            }
            let (z, r, scale) = solver.step(&working, &a_p);

            // Largest dual step before a working inequality multiplier hits zero.
            let mut blocking: Option<(usize, f64)> = None;
            for (k, &row) in working.iter().enumerate() {
                if let Row::In(_) = row {
                    if r[k] < -1e-14 {
                        let t = u[k] / -r[k];
                        if blocking.is_none_or(|(_, best)| t < best) {
                            blocking = Some((k, t));
                        }
                    }
                }
            }

            let curvature = -a_p.dot(&z);
            if curvature <= 1e-12 * scale.max(f64::MIN_POSITIVE) {
                // a_p lies in the span of the working normals.
                let Some((k, t)) = blocking else {
                    let conflicting = working
                        .iter()
                        .filter_map(|r| match r {
                            Row::In(j) => Some(*j),
                            Row::Eq(_) => None,
                        })
                        .collect();
                    let (dual_eq, dual_in) = split_duals(&working, &u, n_eq, m);
                    return Ok(QpSolution {
                        objective: qp.objective(&x),
                        x,
                        dual_eq,
                        dual_in,
                        active_set: active_from(&working),
                        status: QpStatus::Infeasible {
                            constraint: p,
                            conflicting,
                        },
                        iterations,
                    });
                };
                u += &r * t;
                u_p += t;
                drop_row(&mut working, &mut u, &mut in_working, k);
                continue;
            }

            let slack = a_p.dot(&x) - qp.b_in[p];
            let full = (slack / curvature).max(0.0);
            match blocking {
                Some((k, partial)) if partial < full => {
                    x += &z * partial;
                    u += &r * partial;
                    u_p += partial;
                    drop_row(&mut working, &mut u, &mut in_working, k);
                }
                _ => {
                    x += &z * full;
                    u += &r * full;
                    u_p += full;
                    working.push(Row::In(p));
                    in_working[p] = true;
                    u = u.push(u_p);
                    break;
                }
            }
        }
    }

    // Re-solve on the final working set to clean up accumulated rounding.
    if let Some((xs, us)) = solver.equality_solve(&working) {
        x = xs;
        u = us;
    }
    let (dual_eq, mut dual_in) = split_duals(&working, &u, n_eq, m);
    for v in dual_in.iter_mut() {
        if *v < 0.0 && *v > -1e-9 {
            *v = 0.0;
        }
    }
    Ok(QpSolution {
        objective: qp.objective(&x),
        x,
        dual_eq,
        dual_in,
        active_set: active_from(&working),
        status: QpStatus::Optimal,
        iterations,
    })
}

fn drop_row(working: &mut Vec<Row>, u: &mut DVector<f64>, in_working: &mut [bool], k: usize) {
    if let Row::In(j) = working[k] {
        in_working[j] = false;
    }
    working.remove(k);
    *u = u.clone().remove_row(k);
}

fn split_duals(working: &[Row], u: &DVector<f64>, n_eq: usize, m: usize) -> (DVector<f64>, DVector<f64>) {
    let mut dual_eq = DVector::zeros(n_eq);
    let mut dual_in = DVector::zeros(m);
    for (k, row) in working.iter().enumerate() {
        match *row {
            Row::Eq(i) => dual_eq[i] = u[k],
            Row::In(j) => dual_in[j] = u[k],
        }
    }
    (dual_eq, dual_in)
}

fn active_from(working: &[Row]) -> Vec<usize> {
    let mut active: Vec<usize> = working
        .iter()
        .filter_map(|r| match r {
            Row::In(j) => Some(*j),
            Row::Eq(_) => None,
        })
        .collect();
    active.sort_unstable();
    active
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KktReport {
    pub stationarity: f64,
    pub primal: f64,
    pub dual: f64,
    pub complementarity: f64,
}

impl KktReport {
    pub fn max(&self) -> f64 {
        self.stationarity
            .max(self.primal)
            .max(self.dual)
            .max(self.complementarity)
    }

    pub fn passes(&self, tol: f64) -> bool {
        self.max() <= tol
    }
}

/// Absolute KKT residuals of `sol` (max-norms).
pub fn check_kkt(qp: &QuadraticProgram, sol: &QpSolution) -> KktReport {
    let x = &sol.x;
    let grad = &qp.h * x + &qp.l + qp.a_eq.transpose() * &sol.dual_eq + qp.a_in.transpose() * &sol.dual_in;
    let eq_res = &qp.a_eq * x - &qp.b_eq;
    let in_res = &qp.a_in * x - &qp.b_in;
    let primal = eq_res
        .iter()
        .map(|v| v.abs())
        .chain(in_res.iter().map(|v| v.max(0.0)))
        .fold(0.0, f64::max);
    let dual = sol.dual_in.iter().map(|v| (-v).max(0.0)).fold(0.0, f64::max);
    let complementarity = sol
        .dual_in
        .iter()
        .zip(in_res.iter())
        .map(|(mu, s)| (mu * s).abs())
        .fold(0.0, f64::max);
    KktReport {
        stationarity: grad.amax(),
        primal,
        dual,
        complementarity,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Degeneracy {
    None,
    PrimalDegenerate,
    DualDegenerate,
}

/// Inequality rows whose slack is within tolerance of zero at `x`.
pub fn tight_rows(qp: &QuadraticProgram, x: &DVector<f64>) -> Vec<usize> {
    (0..qp.b_in.len())
        .filter(|&j| {
            let slack = qp.b_in[j] - qp.a_in.row(j).transpose().dot(x);
            slack.abs() <= DEGENERACY_TOL * (1.0 + qp.b_in[j].abs())
        })
        .collect()
}

/// Classifies an optimal solution. Primal degeneracy (dependent active
/// gradients, equalities included) is reported ahead of dual degeneracy
/// (a tight inequality whose multiplier is below tolerance).
pub fn detect_degeneracy(qp: &QuadraticProgram, sol: &QpSolution) -> Degeneracy {
    let tight = tight_rows(qp, &sol.x);
    let n = qp.dim();
    let rows = qp.b_eq.len() + tight.len();
    if rows > n {
        return Degeneracy::PrimalDegenerate;
    }
    if rows > 0 {
        let mut g = DMatrix::zeros(rows, n);
        let mut r = 0;
        for i in 0..qp.b_eq.len() {
            g.set_row(r, &qp.a_eq.row(i));
            r += 1;
        }
        for &j in &tight {
            g.set_row(r, &qp.a_in.row(j));
            r += 1;
        }
        for mut row in g.row_iter_mut() {
            let norm = row.norm();
            if norm > 0.0 {
                row /= norm;
            }
        }
        let sv = g.singular_values();
        if sv.min() <= DEGENERACY_TOL {
            return Degeneracy::PrimalDegenerate;
        }
    }
    if tight.iter().any(|&j| sol.dual_in[j] < DEGENERACY_TOL) {
        return Degeneracy::DualDegenerate;
    }
    Degeneracy::None
}
