#![allow(dead_code)]

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use tieflow::netmodel::{load_case, Case, Network};
use tieflow::QuadraticProgram;

pub fn fixture(name: &str) -> (Case, Network) {
    let path = format!("{}/../../fixtures/{name}", env!("CARGO_MANIFEST_DIR"));
    let case = load_case(&path).unwrap();
    let net = Network::new(case.system.clone()).unwrap();
    (case, net)
}

/// Random strictly convex QP with `p` equalities and `m` inequalities that is
/// feasible by construction: every constraint holds at a random point, the
/// inequalities with random slack (zero for about a third of them).
pub fn random_qp<R: Rng>(rng: &mut R, n: usize, p: usize, m: usize) -> QuadraticProgram {
    let mut u = || -> f64 { rng.random_range(-1.0..1.0) };
    let root = DMatrix::from_fn(n, n, |_, _| u());
    let h = root.transpose() * &root + DMatrix::identity(n, n) * 0.1;
    let l = DVector::from_fn(n, |_, _| 3.0 * u());
    let x0 = DVector::from_fn(n, |_, _| u());
    let a_eq = DMatrix::from_fn(p, n, |_, _| u());
    let b_eq = &a_eq * &x0;
    let a_in = DMatrix::from_fn(m, n, |_, _| u());
    let slack = DVector::from_fn(m, |_, _| {
        let s = u();
        if s < -0.33 {
            0.0
        } else {
            s.abs()
        }
    });
    let b_in = &a_in * &x0 + slack;
    QuadraticProgram::unconstrained(h, l)
        .with_equalities(a_eq, b_eq)
        .with_inequalities(a_in, b_in)
}

pub fn objective(qp: &QuadraticProgram, x: &DVector<f64>) -> f64 {
    0.5 * x.dot(&(&qp.h * x)) + qp.l.dot(x)
}

/// Optimum by enumerating every working set of inequalities: solve the
/// equality-constrained KKT system and keep the primal feasible point with
/// nonnegative multipliers and the lowest objective.
pub fn enumerate_qp(qp: &QuadraticProgram) -> Option<(DVector<f64>, f64)> {
    let n = qp.dim();
    let p = qp.b_eq.len();
    let m = qp.b_in.len();
    let mut best: Option<(DVector<f64>, f64)> = None;
    for mask in 0u32..(1 << m) {
        let active: Vec<usize> = (0..m).filter(|j| mask & (1 << j) != 0).collect();
        let k = p + active.len();
        if k > n {
            continue;
        }
        let mut kkt = DMatrix::zeros(n + k, n + k);
        let mut rhs = DVector::zeros(n + k);
        kkt.view_mut((0, 0), (n, n)).copy_from(&qp.h);
        rhs.rows_mut(0, n).copy_from(&(-&qp.l));
        for (r, row) in (0..p)
            .map(|i| (qp.a_eq.row(i), qp.b_eq[i]))
            .chain(active.iter().map(|&j| (qp.a_in.row(j), qp.b_in[j])))
            .enumerate()
        {
            kkt.view_mut((n + r, 0), (1, n)).copy_from(&row.0);
            kkt.view_mut((0, n + r), (n, 1)).copy_from(&row.0.transpose());
            rhs[n + r] = row.1;
        }
        let Some(z) = kkt.lu().solve(&rhs) else { continue };
        let x = z.rows(0, n).into_owned();
        let duals = z.rows(n + p, active.len());
        let feasible = (0..m).all(|j| qp.a_in.row(j).transpose().dot(&x) <= qp.b_in[j] + 1e-9);
        let signed = duals.iter().all(|&d| d >= -1e-9);
        if feasible && signed {
            let f = objective(qp, &x);
            if best.as_ref().is_none_or(|(_, b)| f < *b) {
                best = Some((x, f));
            }
        }
    }
    best
}
