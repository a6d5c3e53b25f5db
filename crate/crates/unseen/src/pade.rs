//! Rational approximation of truncated power series.
//!
//! Given leading series coefficients `c_0..c_{m+n}`, a `[m/n]` approximant
//! is a ratio `P(x)/Q(x)` with `deg P <= m`, `deg Q <= n`, `Q(0) = 1`, whose
//! own expansion matches the series through order `m + n`. Compared to the
//! raw truncated series this extrapolates far better outside the radius of
//! convergence, which is exactly how it is used on alternating
//! frequency-profile series.

use crate::error::{Error, Result};

/// A `[m/n]` rational approximant with `denominator[0] == 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct PadeApproximant {
    pub numerator: Vec<f64>,
    pub denominator: Vec<f64>,
}

/// Size (relative to the largest pivot column entry) below which an
/// elimination pivot is treated as zero and the system as degenerate.
const PIVOT_TOL: f64 = 1e-12;

/// Builds the `[num_deg/den_deg]` approximant of a series.
///
/// `coeffs[k]` is the series coefficient `c_k`; at least
/// `num_deg + den_deg + 1` of them must be supplied. An all-zero series
/// yields the zero approximant.
///
/// The Padé table has square blocks where the strict `[m/n]` entry does not
/// exist and the matching system is singular; in that case the denominator
/// degree is reduced until a solvable system appears (the block's
/// representative). If no denominator of positive degree exists the series
/// is reported as [`Error::PadeDegenerate`] and benchmark harnesses print a
/// gap.
pub fn pade_approximant(coeffs: &[f64], num_deg: usize, den_deg: usize) -> Result<PadeApproximant> {
    let needed = num_deg + den_deg + 1;
    if coeffs.len() < needed {
        return Err(Error::InvalidParameter(format!(
            "[{num_deg}/{den_deg}] approximant needs {needed} series coefficients, got {}",
            coeffs.len()
        )));
    }
    if let Some(bad) = coeffs.iter().find(|c| !c.is_finite()) {
        return Err(Error::InvalidParameter(format!("non-finite series coefficient {bad}")));
    }
    if coeffs[..needed].iter().all(|&c| c == 0.0) {
        return Ok(PadeApproximant { numerator: vec![0.0], denominator: vec![1.0] });
    }

    let c = |k: isize| -> f64 {
        if k < 0 {
            0.0
        } else {
            coeffs[k as usize]
        }
    };

    let mut q = None;
    if den_deg == 0 {
        q = Some(vec![1.0]);
    }
    let mut n = den_deg;
    while q.is_none() && n > 0 {
        // Rows k = m+1 ..= m+n of the matching condition give
        // sum_{j=1..n} q_j c_{k-j} = -c_k.
        let mut a = vec![vec![0.0; n]; n];
        let mut b = vec![0.0; n];
        for row in 0..n {
            let k = (num_deg + 1 + row) as isize;
            for j in 1..=n {
                a[row][j - 1] = c(k - j as isize);
            }
            b[row] = -c(k);
        }
        match solve_dense(&mut a, &mut b) {
            Ok(sol) => {
                let mut full = vec![0.0; n + 1];
                full[0] = 1.0;
                full[1..].copy_from_slice(&sol);
                q = Some(full);
            }
            Err(_) if n > 1 => n -= 1,
            Err(e) => return Err(e),
        }
    }
    let q = q.expect("loop either fills q or errors");

    let mut p = vec![0.0; num_deg + 1];
    for (k, pk) in p.iter_mut().enumerate() {
        let mut acc = 0.0;
        for (j, qj) in q.iter().enumerate().take(k + 1) {
            acc += qj * c(k as isize - j as isize);
        }
        *pk = acc;
    }

    Ok(PadeApproximant { numerator: p, denominator: q })
}

impl PadeApproximant {
    /// Evaluates `P(x)/Q(x)`, rejecting points where the denominator
    /// (nearly) vanishes.
    pub fn eval(&self, x: f64) -> Result<f64> {
        let p = horner(&self.numerator, x);
        let q = horner(&self.denominator, x);
        let scale = self.denominator.iter().fold(0.0f64, |m, c| m.max(c.abs())) * x.abs().max(1.0);
        if !q.is_finite() || q.abs() <= PIVOT_TOL * scale.max(1.0) {
            return Err(Error::PadeDegenerate(format!("denominator vanishes at x = {x}")));
        }
        Ok(p / q)
    }
}

fn horner(coeffs: &[f64], x: f64) -> f64 {
    coeffs.iter().rev().fold(0.0, |acc, &c| acc * x + c)
}

/// Gaussian elimination with partial pivoting; near-zero pivots mean the
/// matching system is singular.
fn solve_dense(a: &mut [Vec<f64>], b: &mut [f64]) -> Result<Vec<f64>> {
    let n = b.len();
    let scale = a
        .iter()
        .flat_map(|row| row.iter())
        .fold(0.0f64, |m, v| m.max(v.abs()))
        .max(1e-300);
    for col in 0..n {
        let (pivot_row, pivot_abs) = (col..n)
            .map(|row| (row, a[row][col].abs()))
            .max_by(|x, y| x.1.total_cmp(&y.1))
            .expect("non-empty column");
        if pivot_abs <= PIVOT_TOL * scale {
            return Err(Error::PadeDegenerate("singular denominator system".into()));
        }
        a.swap(col, pivot_row);
        b.swap(col, pivot_row);
        for row in col + 1..n {
            let f = a[row][col] / a[col][col];
            if f == 0.0 {
                continue;
            }
            for k in col..n {
                a[row][k] -= f * a[col][k];
            }
            b[row] -= f * b[col];
        }
    }
    let mut x = vec![0.0; n];
    for col in (0..n).rev() {
        let mut acc = b[col];
        for k in col + 1..n {
            acc -= a[col][k] * x[k];
        }
        x[col] = acc / a[col][col];
    }
    Ok(x)
}
