//! Dense symmetric eigendecomposition by cyclic Jacobi rotations.

use crate::error::{Error, Result};

/// Sweep cap for [`symmetric_eigen`].
pub const MAX_JACOBI_SWEEPS: usize = 100;

/// Convergence is declared once the off-diagonal Frobenius norm drops below
/// this fraction of the trace.
pub const JACOBI_RELATIVE_TOLERANCE: f64 = 1e-10;

/// Eigenpairs of a symmetric matrix, sorted by descending eigenvalue.
#[derive(Debug, Clone)]
pub struct SymmetricEigen {
    pub dim: usize,
    pub values: Vec<f64>,
    /// Column-major: eigenvector `k` occupies `vectors[k * dim..(k + 1) * dim]`.
    pub vectors: Vec<f64>,
    pub sweeps: usize,
}

impl SymmetricEigen {
    pub fn vector(&self, k: usize) -> &[f64] {
        &self.vectors[k * self.dim..(k + 1) * self.dim]
    }
}

fn off_diagonal_norm(a: &[f64], n: usize) -> f64 {
    let mut sum = 0.0;
    for i in 0..n {
        for j in 0..n {
            if i != j {
                sum += a[i * n + j] * a[i * n + j];
            }
        }
    }
    sum.sqrt()
}

/// Diagonalizes the row-major symmetric `n x n` matrix `matrix`.
///
/// Eigenvectors are unit norm, signed so that their first nonzero component is
/// positive, and ordered by descending eigenvalue; exact ties keep the order in
/// which the rotations left them.
pub fn symmetric_eigen(matrix: &[f64], n: usize) -> Result<SymmetricEigen> {
    if n == 0 || matrix.len() != n * n {
        return Err(Error::invalid(format!(
            "expected a square matrix of {n}x{n} entries, got {}",
            matrix.len()
        )));
    }
    let mut a = matrix.to_vec();
    // v is row-major here; column k is eigenvector k.
    let mut v = vec![0.0; n * n];
    for i in 0..n {
        v[i * n + i] = 1.0;
    }

    let trace: f64 = (0..n).map(|i| a[i * n + i]).sum();
    let scale = if trace > 0.0 {
        trace
    } else {
        a.iter().map(|x| x * x).sum::<f64>().sqrt()
    };
    let tolerance = JACOBI_RELATIVE_TOLERANCE * scale;

    let mut sweeps = 0;
    let mut off = off_diagonal_norm(&a, n);
    while off > tolerance {
        if sweeps == MAX_JACOBI_SWEEPS {
            return Err(Error::NoConvergence {
                sweeps,
                off_diagonal: off,
                tolerance,
            });
        }
        sweeps += 1;
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = a[p * n + q];
                if apq == 0.0 {
                    continue;
                }
                let theta = (a[q * n + q] - a[p * n + p]) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let akp = a[k * n + p];
                    let akq = a[k * n + q];
                    a[k * n + p] = c * akp - s * akq;
                    a[k * n + q] = s * akp + c * akq;
                }
                for k in 0..n {
                    let apk = a[p * n + k];
                    let aqk = a[q * n + k];
                    a[p * n + k] = c * apk - s * aqk;
                    a[q * n + k] = s * apk + c * aqk;
                }
                a[p * n + q] = 0.0;
                a[q * n + p] = 0.0;
                for k in 0..n {
                    let vkp = v[k * n + p];
                    let vkq = v[k * n + q];
                    v[k * n + p] = c * vkp - s * vkq;
                    v[k * n + q] = s * vkp + c * vkq;
                }
            }
        }
        off = off_diagonal_norm(&a, n);
    }

    let mut order: Vec<usize> = (0..n).collect();
    // Stable: equal eigenvalues keep their column order.
    order.sort_by(|&i, &j| a[j * n + j].total_cmp(&a[i * n + i]));

    let mut values = Vec::with_capacity(n);
    let mut vectors = Vec::with_capacity(n * n);
    for &col in &order {
        values.push(a[col * n + col]);
        let start = vectors.len();
        vectors.extend((0..n).map(|row| v[row * n + col]));
        let column = &mut vectors[start..];
        let norm = column.iter().map(|x| x * x).sum::<f64>().sqrt();
        let first = column
            .iter()
            .copied()
            .find(|x| x.abs() > 1e-12)
            .unwrap_or(1.0);
        let sign = if first < 0.0 { -1.0 } else { 1.0 };
        for x in column.iter_mut() {
            *x = sign * *x / norm;
        }
    }
    Ok(SymmetricEigen {
        dim: n,
        values,
        vectors,
        sweeps,
    })
}
