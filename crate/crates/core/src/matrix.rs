//! Dense row-major matrices of `f32` token vectors.

use crate::error::{Error, Result};

/// An `rows × dim` matrix of token vectors stored row-major.
///
/// This is the common representation for queries, raw documents, encoder
/// hidden states and compressed documents. Every value is finite.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingMatrix {
    rows: usize,
    dim: usize,
    data: Vec<f32>,
}

impl EmbeddingMatrix {
    pub fn new(rows: usize, dim: usize, data: Vec<f32>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::Validation("embedding dim must be at least 1".into()));
        }
        if data.len() != rows * dim {
            return Err(Error::Validation(format!(
                "data length {} does not match {rows}x{dim}",
                data.len()
            )));
        }
        if let Some(pos) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::Validation(format!(
                "non-finite value at row {}, column {}",
                pos / dim,
                pos % dim
            )));
        }
        Ok(Self { rows, dim, data })
    }

    /// Build from a slice of equal-length rows.
    pub fn from_rows<R: AsRef<[f32]>>(rows: &[R]) -> Result<Self> {
        let dim = rows.first().map(|r| r.as_ref().len()).ok_or_else(|| {
            Error::Validation("cannot infer dim from zero rows; use EmbeddingMatrix::empty".into())
        })?;
        let mut data = Vec::with_capacity(rows.len() * dim);
        for (i, r) in rows.iter().enumerate() {
            let r = r.as_ref();
            if r.len() != dim {
                return Err(Error::Validation(format!(
                    "row {i} has length {}, expected {dim}",
                    r.len()
                )));
            }
            data.extend_from_slice(r);
        }
        Self::new(rows.len(), dim, data)
    }

    /// A matrix with no rows.
    pub fn empty(dim: usize) -> Result<Self> {
        Self::new(0, dim, Vec::new())
    }

    pub fn zeros(rows: usize, dim: usize) -> Result<Self> {
        Self::new(rows, dim, vec![0.0; rows * dim])
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.rows == 0
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    pub fn into_data(self) -> Vec<f32> {
        self.data
    }

    pub fn row(&self, i: usize) -> &[f32] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn iter_rows(&self) -> impl ExactSizeIterator<Item = &[f32]> + '_ {
        self.data.chunks_exact(self.dim)
    }

    /// New matrix made of the given rows, in the given order.
    pub fn select_rows(&self, indices: &[usize]) -> Self {
        let mut data = Vec::with_capacity(indices.len() * self.dim);
        for &i in indices {
            data.extend_from_slice(self.row(i));
        }
        Self {
            rows: indices.len(),
            dim: self.dim,
            data,
        }
    }

    /// Row-wise vertical concatenation.
    pub fn vstack(&self, other: &Self) -> Result<Self> {
        if self.dim != other.dim {
            return Err(Error::Contract(format!(
                "cannot stack dim {} with dim {}",
                self.dim, other.dim
            )));
        }
        let mut data = self.data.clone();
        data.extend_from_slice(&other.data);
        Ok(Self {
            rows: self.rows + other.rows,
            dim: self.dim,
            data,
        })
    }

    /// Append zero rows until the matrix has `rows` rows. No-op when already long enough.
    pub fn zero_padded(&self, rows: usize) -> Self {
        let mut data = self.data.clone();
        if rows > self.rows {
            data.resize(rows * self.dim, 0.0);
        }
        Self {
            rows: self.rows.max(rows),
            dim: self.dim,
            data,
        }
    }

    /// L2-normalize every row. Zero-norm rows stay zero.
    pub fn normalized_rows(&self) -> Self {
        let mut data = self.data.clone();
        for row in data.chunks_exact_mut(self.dim) {
            let norm = l2_norm(row);
            if norm > 0.0 {
                for v in row.iter_mut() {
                    *v = (*v as f64 / norm) as f32;
                }
            }
        }
        Self {
            rows: self.rows,
            dim: self.dim,
            data,
        }
    }

    /// Build from `f64` values computed in double precision, rounding to `f32`.
    pub(crate) fn from_f64_rows(rows: usize, dim: usize, values: &[f64]) -> Result<Self> {
        Self::new(rows, dim, values.iter().map(|&v| v as f32).collect())
    }
}

/// A dense `n × n` matrix of `f64`, used for distance and similarity tables.
#[derive(Debug, Clone, PartialEq)]
pub struct SquareMatrix {
    n: usize,
    data: Vec<f64>,
}

impl SquareMatrix {
    pub fn zeros(n: usize) -> Self {
        Self {
            n,
            data: vec![0.0; n * n],
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn get(&self, a: usize, b: usize) -> f64 {
        self.data[a * self.n + b]
    }

    pub fn set(&mut self, a: usize, b: usize, v: f64) {
        self.data[a * self.n + b] = v;
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn is_symmetric(&self) -> bool {
        (0..self.n).all(|a| (0..a).all(|b| self.get(a, b) == self.get(b, a)))
    }
}

/// Dot product accumulated in `f64`, ascending over coordinates.
#[inline]
pub fn dot(a: &[f32], b: &[f32]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    let mut acc = 0.0f64;
    for (x, y) in a.iter().zip(b) {
        acc += *x as f64 * *y as f64;
    }
    acc
}

#[inline]
pub fn l2_norm(a: &[f32]) -> f64 {
    dot(a, a).sqrt()
}

/// Cosine similarity; defined as 0 when either vector has zero norm.
pub fn cosine(a: &[f32], b: &[f32]) -> f64 {
    let denom = l2_norm(a) * l2_norm(b);
    if denom == 0.0 {
        0.0
    } else {
        dot(a, b) / denom
    }
}
