//! Row-contiguous storage for sets of equal-dimension `f32` vectors.

use crate::error::{Error, Result};

/// `count` vectors of dimension `dim`, stored row after row.
///
/// Every value is finite and the set is never empty.
#[derive(Debug, Clone, PartialEq)]
pub struct VectorSet {
    dim: usize,
    values: Vec<f32>,
}

impl VectorSet {
    pub fn new(dim: usize, values: Vec<f32>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::invalid("vector dimension must be positive"));
        }
        if values.is_empty() {
            return Err(Error::invalid(
                "vector set must contain at least one vector",
            ));
        }
        if !values.len().is_multiple_of(dim) {
            return Err(Error::invalid(format!(
                "{} values do not split into rows of dimension {dim}",
                values.len()
            )));
        }
        if let Some(pos) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::invalid(format!(
                "non-finite value {} in row {} component {}",
                values[pos],
                pos / dim,
                pos % dim
            )));
        }
        Ok(VectorSet { dim, values })
    }

    pub fn from_rows<R: AsRef<[f32]>>(rows: &[R]) -> Result<Self> {
        let dim = rows
            .first()
            .map(|r| r.as_ref().len())
            .ok_or_else(|| Error::invalid("vector set must contain at least one vector"))?;
        let mut values = Vec::with_capacity(dim * rows.len());
        for row in rows {
            let row = row.as_ref();
            if row.len() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    found: row.len(),
                });
            }
            values.extend_from_slice(row);
        }
        Self::new(dim, values)
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.values.len() / self.dim
    }

    /// Always false; kept for API symmetry with `len`.
    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f32] {
        &self.values[i * self.dim..(i + 1) * self.dim]
    }

    pub fn rows(&self) -> impl ExactSizeIterator<Item = &[f32]> + '_ {
        self.values.chunks_exact(self.dim)
    }

    pub fn as_slice(&self) -> &[f32] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f32> {
        self.values
    }

    /// A new set holding the rows at `indices`, in that order.
    pub fn select(&self, indices: &[usize]) -> Result<Self> {
        let mut values = Vec::with_capacity(indices.len() * self.dim);
        for &i in indices {
            if i >= self.len() {
                return Err(Error::invalid(format!(
                    "row index {i} out of range for {} vectors",
                    self.len()
                )));
            }
            values.extend_from_slice(self.row(i));
        }
        Self::new(self.dim, values)
    }
}
