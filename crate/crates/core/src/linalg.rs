//! Small dense linear algebra: n×3 least squares and 3×3 inverses.

use crate::error::{Error, Result};
use crate::scalar::{rank_eps, Real};

pub type Mat3<F> = [[F; 3]; 3];

/// Least-squares solution of `A x = b` for an `m × 3` matrix `A` (m ≥ 3)
/// using Householder QR. Returns `x` and the residual norm `‖A x − b‖`.
pub fn lstsq3<F: Real>(a: &[[F; 3]], b: &[F]) -> Result<([F; 3], F)> {
    let m = a.len();
    if m < 3 || b.len() != m {
        return Err(Error::invalid(format!("least squares needs m ≥ 3 rows and matching b (m={m}, b={})", b.len())));
    }
    let mut r: Vec<[F; 3]> = a.to_vec();
    let mut qtb: Vec<F> = b.to_vec();
    let scale = a
        .iter()
        .flat_map(|row| row.iter())
        .fold(F::zero(), |acc, v| acc.max(v.abs()));
    if scale == F::zero() {
        return Err(Error::SingularGeometry("design matrix is zero".into()));
    }

    for k in 0..3 {
        let norm = (k..m).fold(F::zero(), |acc, i| acc + r[i][k] * r[i][k]).sqrt();
        if norm <= rank_eps::<F>() * scale * F::lit(m as f64) {
            return Err(Error::SingularGeometry(format!("column {k} is linearly dependent")));
        }
        let alpha = if r[k][k] > F::zero() { -norm } else { norm };
        let mut v: Vec<F> = (k..m).map(|i| r[i][k]).collect();
        v[0] -= alpha;
        let vnorm_sq = v.iter().fold(F::zero(), |acc, &x| acc + x * x);
        if vnorm_sq > F::zero() {
            for j in k..3 {
                let dot = (k..m).fold(F::zero(), |acc, i| acc + v[i - k] * r[i][j]);
                let f = F::lit(2.0) * dot / vnorm_sq;
                for i in k..m {
                    r[i][j] -= f * v[i - k];
                }
            }
            let dot = (k..m).fold(F::zero(), |acc, i| acc + v[i - k] * qtb[i]);
            let f = F::lit(2.0) * dot / vnorm_sq;
            for i in k..m {
                qtb[i] -= f * v[i - k];
            }
        }
    }

    let diag_max = (0..3).fold(F::zero(), |acc, k| acc.max(r[k][k].abs()));
    for k in 0..3 {
        if r[k][k].abs() <= diag_max * F::lit(1e-10).max(rank_eps::<F>()) {
            return Err(Error::SingularGeometry(format!("rank deficiency at column {k}")));
        }
    }

    let mut x = [F::zero(); 3];
    for k in (0..3).rev() {
        let mut s = qtb[k];
        for j in k + 1..3 {
            s -= r[k][j] * x[j];
        }
        x[k] = s / r[k][k];
    }

    let residual = a
        .iter()
        .zip(b)
        .fold(F::zero(), |acc, (row, &bi)| {
            let e = row[0] * x[0] + row[1] * x[1] + row[2] * x[2] - bi;
            acc + e * e
        })
        .sqrt();
    Ok((x, residual))
}

/// Gauss–Jordan inverse with partial pivoting. `None` if a pivot vanishes.
pub fn inverse3<F: Real>(m: &Mat3<F>) -> Option<Mat3<F>> {
    let mut a = *m;
    let mut inv = identity3::<F>();
    let scale = norm1(m);
    if scale == F::zero() || !scale.is_finite() {
        return None;
    }
    for col in 0..3 {
        let pivot = (col..3).max_by(|&i, &j| a[i][col].abs().partial_cmp(&a[j][col].abs()).unwrap())?;
        if a[pivot][col].abs() <= rank_eps::<F>() * scale {
            return None;
        }
        a.swap(col, pivot);
        inv.swap(col, pivot);
        let p = a[col][col];
        for j in 0..3 {
            a[col][j] /= p;
            inv[col][j] /= p;
        }
        for i in 0..3 {
            if i != col {
                let f = a[i][col];
                for j in 0..3 {
                    a[i][j] -= f * a[col][j];
                    inv[i][j] -= f * inv[col][j];
                }
            }
        }
    }
    Some(inv)
}

pub fn identity3<F: Real>() -> Mat3<F> {
    let (o, z) = (F::one(), F::zero());
    [[o, z, z], [z, o, z], [z, z, o]]
}

/// Induced 1-norm (maximum absolute column sum).
pub fn norm1<F: Real>(m: &Mat3<F>) -> F {
    (0..3)
        .map(|j| (0..3).fold(F::zero(), |acc, i| acc + m[i][j].abs()))
        .fold(F::zero(), F::max)
}

/// `AᵀA` for an `m × 3` matrix.
pub fn gram3<F: Real>(a: &[[F; 3]]) -> Mat3<F> {
    let mut g = [[F::zero(); 3]; 3];
    for row in a {
        for i in 0..3 {
            for j in 0..3 {
                g[i][j] += row[i] * row[j];
            }
        }
    }
    g
}
