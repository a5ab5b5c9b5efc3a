use nalgebra::DMatrix;
use thiserror::Error;

use super::Area;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ShiftError {
    #[error("area {area}: bus {bus} is not connected to the slack bus")]
    Disconnected { area: String, bus: String },
    #[error("area {area}: reduced susceptance matrix is singular")]
    Singular { area: String },
}

/// DC shift factors of one area, referenced to its slack bus.
///
/// `a[(k, b)]` is the flow on branch `k` (positive `from -> to`) caused by a
/// 1 MW injection at bus `b` withdrawn at the slack bus. `b[(k, j)]` is the
/// column of `a` for the proxy bus of the area's `j`-th interface, so with
/// outbound interchange `q_n` the branch flows are
///
/// ```text
///     f = A (g - d) - B q_n
/// ```
///
/// and the monitored limits read `A (d - g) + B q_n <= F` together with the
/// mirrored row `A (g - d) - B q_n <= F`.
#[derive(Debug, Clone, PartialEq)]
pub struct ShiftFactors {
    pub area: String,
    pub a: DMatrix<f64>,
    pub b: DMatrix<f64>,
}

impl ShiftFactors {
    /// Branch flows for bus injections `p` (MW, one per bus).
    pub fn flows(&self, p: &[f64]) -> Vec<f64> {
        (0..self.a.nrows())
            .map(|k| self.a.row(k).iter().zip(p).map(|(s, v)| s * v).sum())
            .collect()
    }
}

pub fn compute_shift_factors(area: &Area) -> Result<ShiftFactors, ShiftError> {
    let nb = area.buses.len();
    let nl = area.branches.len();

    // Connectivity from the slack bus over internal branches.
    let mut seen = vec![false; nb];
    let mut stack = vec![area.slack];
    seen[area.slack] = true;
    while let Some(b) = stack.pop() {
        for br in &area.branches {
            let next = if br.from == b {
                br.to
            } else if br.to == b {
                br.from
            } else {
                continue;
            };
            if !seen[next] {
                seen[next] = true;
                stack.push(next);
            }
        }
    }
    if let Some(b) = seen.iter().position(|s| !s) {
        return Err(ShiftError::Disconnected {
            area: area.id.clone(),
            bus: area.buses[b].id.clone(),
        });
    }

    // Reduced bus susceptance matrix with the slack row/column removed.
    let reduced: Vec<Option<usize>> = {
        let mut next = 0;
        (0..nb)
            .map(|b| {
                if b == area.slack {
                    None
                } else {
                    next += 1;
                    Some(next - 1)
                }
            })
            .collect()
    };
    let nr = nb - 1;
    let mut bbus = DMatrix::<f64>::zeros(nr, nr);
    for br in &area.branches {
        let (f, t) = (reduced[br.from], reduced[br.to]);
        if let Some(f) = f {
            bbus[(f, f)] += br.susceptance;
        }
        if let Some(t) = t {
            bbus[(t, t)] += br.susceptance;
        }
        if let (Some(f), Some(t)) = (f, t) {
            bbus[(f, t)] -= br.susceptance;
            bbus[(t, f)] -= br.susceptance;
        }
    }

    let mut a = DMatrix::<f64>::zeros(nl, nb);
    if nr > 0 && nl > 0 {
        let chol = bbus
            .cholesky()
            .ok_or_else(|| ShiftError::Singular { area: area.id.clone() })?;
        // X = B_r^{-1}; angle at bus b for unit injection at c is X[b, c].
        let x = chol.inverse();
        let angle = |bus: usize, inj: usize| match (reduced[bus], reduced[inj]) {
            (Some(r), Some(c)) => x[(r, c)],
            _ => 0.0,
        };
        for (k, br) in area.branches.iter().enumerate() {
            for c in 0..nb {
                a[(k, c)] = br.susceptance * (angle(br.from, c) - angle(br.to, c));
            }
        }
    }

    let mut b = DMatrix::<f64>::zeros(nl, area.interfaces.len());
    for (j, ai) in area.interfaces.iter().enumerate() {
        b.set_column(j, &a.column(ai.proxy_bus));
    }

    Ok(ShiftFactors {
        area: area.id.clone(),
        a,
        b,
    })
}
