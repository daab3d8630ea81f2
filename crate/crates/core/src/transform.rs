//! Orthogonal rotations of the vector space: the data-aware PCA basis and the
//! seeded random baseline.
//!
//! Component `k` of a transformed vector is its projection on column `k` of
//! the matrix, and `eigenvalues[k]` is the variance of the fitting data along
//! that column. For the PCA basis these are the covariance eigenvalues in
//! descending order, so the leading components carry the most variance.
//!
//! Vectors are rotated without centering. Distances are translation
//! invariant, so the mean is kept for diagnostics only.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::linalg::symmetric_eigen;
use crate::vectors::VectorSet;

/// Largest tolerated `|WᵀW - I|` entry.
pub const ORTHOGONALITY_TOLERANCE: f64 = 1e-5;

/// Eigenvalues down to this value are treated as rounding noise and clamped
/// to zero.
pub const NEGATIVE_EIGENVALUE_TOLERANCE: f64 = 1e-6;

pub const TRANSFORM_MAGIC: &[u8; 4] = b"DADE";
pub const TRANSFORM_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TransformKind {
    Pca,
    Random,
}

impl TransformKind {
    fn code(self) -> u8 {
        match self {
            TransformKind::Pca => 0,
            TransformKind::Random => 1,
        }
    }

    fn from_code(code: u8) -> Result<Self> {
        match code {
            0 => Ok(TransformKind::Pca),
            1 => Ok(TransformKind::Random),
            other => Err(Error::format(format!("unknown transform kind {other}"))),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            TransformKind::Pca => "pca",
            TransformKind::Random => "random",
        }
    }
}

impl std::fmt::Display for TransformKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// Sample mean and `1/N`-normalized covariance (row-major `D x D`).
#[derive(Debug, Clone)]
pub struct Covariance {
    pub dim: usize,
    pub mean: Vec<f64>,
    pub matrix: Vec<f64>,
}

impl Covariance {
    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.matrix[i * self.dim + j]
    }

    pub fn trace(&self) -> f64 {
        (0..self.dim).map(|i| self.get(i, i)).sum()
    }

    /// `wᵀ C w`: the variance of the data projected on `w`.
    pub fn quadratic_form(&self, w: &[f64]) -> f64 {
        let d = self.dim;
        (0..d)
            .map(|i| w[i] * (0..d).map(|j| self.matrix[i * d + j] * w[j]).sum::<f64>())
            .sum()
    }
}

pub fn compute_covariance(data: &VectorSet) -> Result<Covariance> {
    let n = data.len();
    if n < 2 {
        return Err(Error::invalid(format!(
            "covariance needs at least 2 vectors, got {n}"
        )));
    }
    let d = data.dim();
    let mut mean = vec![0.0f64; d];
    for row in data.rows() {
        for (m, &x) in mean.iter_mut().zip(row) {
            *m += x as f64;
        }
    }
    for m in &mut mean {
        *m /= n as f64;
    }

    let mut matrix = vec![0.0f64; d * d];
    let mut centered = vec![0.0f64; d];
    for row in data.rows() {
        for ((c, &x), m) in centered.iter_mut().zip(row).zip(&mean) {
            *c = x as f64 - m;
        }
        for i in 0..d {
            let ci = centered[i];
            let out = &mut matrix[i * d..(i + 1) * d];
            for j in i..d {
                out[j] += ci * centered[j];
            }
        }
    }
    for i in 0..d {
        for j in i..d {
            let v = matrix[i * d + j] / n as f64;
            matrix[i * d + j] = v;
            matrix[j * d + i] = v;
        }
    }
    Ok(Covariance {
        dim: d,
        mean,
        matrix,
    })
}

/// A fitted `D x D` orthogonal rotation plus the per-component variances used
/// to rescale partial distances.
#[derive(Debug, Clone, PartialEq)]
pub struct OrthoTransform {
    dim: usize,
    kind: TransformKind,
    mean: Vec<f64>,
    /// Column-major by component.
    matrix: Vec<f64>,
    eigenvalues: Vec<f64>,
    lambda_prefix: Vec<f64>,
}

impl OrthoTransform {
    /// Validates and assembles a transform. `matrix` is column-major by
    /// component. PCA eigenvalues must be nonincreasing.
    pub fn from_parts(
        kind: TransformKind,
        mean: Vec<f64>,
        mut eigenvalues: Vec<f64>,
        matrix: Vec<f64>,
    ) -> Result<Self> {
        let dim = eigenvalues.len();
        if dim == 0 {
            return Err(Error::invalid("transform dimension must be positive"));
        }
        if mean.len() != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                found: mean.len(),
            });
        }
        if matrix.len() != dim * dim {
            return Err(Error::invalid(format!(
                "transform matrix has {} entries, expected {}",
                matrix.len(),
                dim * dim
            )));
        }
        for (k, lambda) in eigenvalues.iter_mut().enumerate() {
            if !lambda.is_finite() || *lambda < -NEGATIVE_EIGENVALUE_TOLERANCE {
                return Err(Error::invalid(format!(
                    "eigenvalue {k} is {lambda}, expected a nonnegative number"
                )));
            }
            if *lambda < 0.0 {
                *lambda = 0.0;
            }
        }
        if kind == TransformKind::Pca && eigenvalues.windows(2).any(|w| w[0] < w[1]) {
            return Err(Error::invalid("PCA eigenvalues must be nonincreasing"));
        }
        let t = OrthoTransform {
            dim,
            kind,
            mean,
            lambda_prefix: prefix_sums(&eigenvalues),
            eigenvalues,
            matrix,
        };
        let err = t.orthogonality_error();
        if err.is_nan() || err > ORTHOGONALITY_TOLERANCE {
            return Err(Error::invalid(format!(
                "matrix is not orthogonal: max |WᵀW - I| = {err:e}"
            )));
        }
        Ok(t)
    }

    pub fn identity(dim: usize) -> Self {
        let mut matrix = vec![0.0; dim * dim];
        for k in 0..dim {
            matrix[k * dim + k] = 1.0;
        }
        OrthoTransform {
            dim,
            kind: TransformKind::Random,
            mean: vec![0.0; dim],
            matrix,
            eigenvalues: vec![1.0; dim],
            lambda_prefix: (0..=dim).map(|k| k as f64).collect(),
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn kind(&self) -> TransformKind {
        self.kind
    }

    pub fn mean(&self) -> &[f64] {
        &self.mean
    }

    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    /// `lambda_prefix()[d]` is the variance captured by the first `d`
    /// components; entry 0 is zero and entry `D` the total.
    pub fn lambda_prefix(&self) -> &[f64] {
        &self.lambda_prefix
    }

    pub fn total_variance(&self) -> f64 {
        self.lambda_prefix[self.dim]
    }

    /// Column `k` of the rotation.
    pub fn component(&self, k: usize) -> &[f64] {
        &self.matrix[k * self.dim..(k + 1) * self.dim]
    }

    pub fn matrix(&self) -> &[f64] {
        &self.matrix
    }

    pub fn orthogonality_error(&self) -> f64 {
        let mut worst = 0.0f64;
        for a in 0..self.dim {
            for b in a..self.dim {
                let dot: f64 = self
                    .component(a)
                    .iter()
                    .zip(self.component(b))
                    .map(|(x, y)| x * y)
                    .sum();
                let target = if a == b { 1.0 } else { 0.0 };
                worst = worst.max((dot - target).abs());
            }
        }
        worst
    }

    /// Rotates one vector: output component `k` is `w_kᵀ v`.
    pub fn apply_one(&self, v: &[f32]) -> Result<Vec<f32>> {
        let mut out = vec![0.0; self.dim];
        self.apply_into(v, &mut out)?;
        Ok(out)
    }

    pub fn apply_into(&self, v: &[f32], out: &mut [f32]) -> Result<()> {
        if v.len() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                found: v.len(),
            });
        }
        for (k, o) in out.iter_mut().enumerate().take(self.dim) {
            *o = self
                .component(k)
                .iter()
                .zip(v)
                .map(|(w, &x)| w * x as f64)
                .sum::<f64>() as f32;
        }
        Ok(())
    }

    pub fn apply(&self, v: &VectorSet) -> Result<VectorSet> {
        if v.dim() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                found: v.dim(),
            });
        }
        let mut values = vec![0.0f32; v.len() * self.dim];
        for (row, out) in v.rows().zip(values.chunks_exact_mut(self.dim)) {
            self.apply_into(row, out)?;
        }
        VectorSet::new(self.dim, values)
    }

    pub fn write_to<W: Write>(&self, mut w: W) -> Result<()> {
        w.write_all(TRANSFORM_MAGIC)?;
        w.write_all(&TRANSFORM_VERSION.to_le_bytes())?;
        w.write_all(&[self.kind.code()])?;
        w.write_all(&(self.dim as u32).to_le_bytes())?;
        for block in [&self.mean, &self.eigenvalues, &self.matrix] {
            for x in block.iter() {
                w.write_all(&x.to_le_bytes())?;
            }
        }
        Ok(())
    }

    pub fn read_from<R: Read>(mut r: R) -> Result<Self> {
        let mut magic = [0u8; 4];
        r.read_exact(&mut magic)
            .map_err(|_| Error::format("transform file too short for header"))?;
        if &magic != TRANSFORM_MAGIC {
            return Err(Error::format("bad transform magic"));
        }
        let version = read_u32(&mut r)?;
        if version != TRANSFORM_VERSION {
            return Err(Error::format(format!(
                "unsupported transform version {version}"
            )));
        }
        let mut kind = [0u8; 1];
        r.read_exact(&mut kind)
            .map_err(|_| Error::format("transform file too short for header"))?;
        let kind = TransformKind::from_code(kind[0])?;
        let dim = read_u32(&mut r)? as usize;
        if dim == 0 {
            return Err(Error::format("transform dimension is zero"));
        }
        let mean = read_f64s(&mut r, dim)?;
        let eigenvalues = read_f64s(&mut r, dim)?;
        let matrix = read_f64s(&mut r, dim * dim)?;
        Self::from_parts(kind, mean, eigenvalues, matrix)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut w = BufWriter::new(File::create(path)?);
        self.write_to(&mut w)?;
        w.flush()?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::read_from(BufReader::new(File::open(path)?))
    }
}

fn prefix_sums(values: &[f64]) -> Vec<f64> {
    let mut prefix = Vec::with_capacity(values.len() + 1);
    let mut acc = 0.0;
    prefix.push(acc);
    for v in values {
        acc += v;
        prefix.push(acc);
    }
    prefix
}

pub(crate) fn read_u32<R: Read>(r: &mut R) -> Result<u32> {
    let mut buf = [0u8; 4];
    r.read_exact(&mut buf)
        .map_err(|_| Error::format("unexpected end of file"))?;
    Ok(u32::from_le_bytes(buf))
}

pub(crate) fn read_f64s<R: Read>(r: &mut R, n: usize) -> Result<Vec<f64>> {
    let mut buf = vec![0u8; n * 8];
    r.read_exact(&mut buf)
        .map_err(|_| Error::format("unexpected end of file"))?;
    Ok(buf
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect())
}

/// Fits the PCA rotation: columns are covariance eigenvectors by descending
/// eigenvalue.
pub fn fit_pca(data: &VectorSet) -> Result<OrthoTransform> {
    let cov = compute_covariance(data)?;
    let eigen = symmetric_eigen(&cov.matrix, cov.dim)?;
    log::debug!(
        "pca fit: D={} converged in {} jacobi sweeps",
        cov.dim,
        eigen.sweeps
    );
    let eigenvalues = eigen.values.iter().map(|&l| l.max(0.0)).collect();
    OrthoTransform::from_parts(TransformKind::Pca, cov.mean, eigenvalues, eigen.vectors)
}

/// Seeded Haar-random orthogonal matrix from the QR factorization of a
/// Gaussian matrix. Eigenvalues hold the per-component variance of `data`
/// after projection, in column order (not sorted).
pub fn fit_random_orthogonal(dim: usize, seed: u64, data: &VectorSet) -> Result<OrthoTransform> {
    if dim == 0 {
        return Err(Error::invalid("transform dimension must be positive"));
    }
    if data.dim() != dim {
        return Err(Error::DimensionMismatch {
            expected: dim,
            found: data.dim(),
        });
    }
    let matrix = random_orthogonal_matrix(dim, seed);
    let (mean, eigenvalues) = if data.len() >= 2 {
        let cov = compute_covariance(data)?;
        let vars = (0..dim)
            .map(|k| cov.quadratic_form(&matrix[k * dim..(k + 1) * dim]).max(0.0))
            .collect();
        (cov.mean, vars)
    } else {
        let mean = data.row(0).iter().map(|&x| x as f64).collect();
        (mean, vec![0.0; dim])
    };
    OrthoTransform::from_parts(TransformKind::Random, mean, eigenvalues, matrix)
}

/// Column-major orthonormal matrix. Modified Gram-Schmidt is run twice per
/// column, which keeps `WᵀW` within a few ulps of the identity; the positive
/// diagonal of the implied `R` makes the result Haar distributed.
pub fn random_orthogonal_matrix(dim: usize, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut q: Vec<f64> = (0..dim * dim)
        .map(|_| StandardNormal.sample(&mut rng))
        .collect();
    for k in 0..dim {
        for _ in 0..2 {
            for j in 0..k {
                let (done, rest) = q.split_at_mut(k * dim);
                let qj = &done[j * dim..(j + 1) * dim];
                let qk = &mut rest[..dim];
                let dot: f64 = qj.iter().zip(qk.iter()).map(|(a, b)| a * b).sum();
                for (x, y) in qk.iter_mut().zip(qj) {
                    *x -= dot * y;
                }
            }
        }
        let col = &mut q[k * dim..(k + 1) * dim];
        let norm = col.iter().map(|x| x * x).sum::<f64>().sqrt();
        for x in col.iter_mut() {
            *x /= norm;
        }
    }
    q
}

/// Per-component `1/N` variance of a set of vectors.
pub fn component_variances(data: &VectorSet) -> Vec<f64> {
    let n = data.len() as f64;
    let d = data.dim();
    let mut mean = vec![0.0f64; d];
    for row in data.rows() {
        for (m, &x) in mean.iter_mut().zip(row) {
            *m += x as f64;
        }
    }
    mean.iter_mut().for_each(|m| *m /= n);
    let mut var = vec![0.0f64; d];
    for row in data.rows() {
        for ((v, &x), m) in var.iter_mut().zip(row).zip(&mean) {
            let c = x as f64 - m;
            *v += c * c;
        }
    }
    var.iter_mut().for_each(|v| *v /= n);
    var
}
