use crate::error::{Error, Result};

/// Row-major `count × dim` matrix of prompt embeddings, stored as `f32`.
///
/// Row `i` is the embedding of line `i` of the corpus it was encoded from.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingMatrix {
    data: Vec<f32>,
    count: usize,
    dim: usize,
    source_hash: Option<String>,
}

impl EmbeddingMatrix {
    pub fn new(count: usize, dim: usize, data: Vec<f32>) -> Result<Self> {
        if count == 0 || dim == 0 {
            return Err(Error::Data(format!("empty matrix ({count} x {dim})")));
        }
        if data.len() != count * dim {
            return Err(Error::Data(format!("buffer of {} values cannot hold {count} x {dim}", data.len())));
        }
        check_finite(&data, dim, 0)?;
        Ok(Self { data, count, dim, source_hash: None })
    }

    /// Builds a matrix from `f64` rows, rounding to storage precision.
    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Result<Self> {
        let dim = rows.first().map_or(0, |r| r.as_ref().len());
        let mut data = Vec::with_capacity(rows.len() * dim);
        for (i, r) in rows.iter().enumerate() {
            let r = r.as_ref();
            if r.len() != dim {
                return Err(Error::Data(format!("row {i} has {} columns, expected {dim}", r.len())));
            }
            data.extend(r.iter().map(|&x| x as f32));
        }
        Self::new(rows.len(), dim, data)
    }

    pub fn with_source_hash(mut self, hash: impl Into<String>) -> Self {
        self.source_hash = Some(hash.into());
        self
    }

    pub fn count(&self) -> usize {
        self.count
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn source_hash(&self) -> Option<&str> {
        self.source_hash.as_deref()
    }

    pub fn as_slice(&self) -> &[f32] {
        &self.data
    }

    pub fn into_vec(self) -> Vec<f32> {
        self.data
    }

    pub fn row(&self, i: usize) -> &[f32] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn rows(&self) -> impl ExactSizeIterator<Item = &[f32]> + '_ {
        self.data.chunks_exact(self.dim)
    }

    /// Row `i` widened to `f64`.
    pub fn row_vector(&self, i: usize) -> EmbeddingVector {
        EmbeddingVector(self.row(i).iter().map(|&x| x as f64).collect())
    }

    /// Copies the rows at `indices`, in that order.
    pub fn select_rows(&self, indices: &[usize]) -> Result<Self> {
        let mut data = Vec::with_capacity(indices.len() * self.dim);
        for &i in indices {
            if i >= self.count {
                return Err(Error::Config(format!("row {i} out of range for {} rows", self.count)));
            }
            data.extend_from_slice(self.row(i));
        }
        Self::new(indices.len(), self.dim, data)
    }
}

/// Reports the first non-finite entry of a row-major buffer; `row_offset` is
/// added to the reported row so chunked readers can give global positions.
pub(crate) fn check_finite(data: &[f32], dim: usize, row_offset: usize) -> Result<()> {
    match data.iter().position(|x| !x.is_finite()) {
        Some(p) => Err(Error::NonFinite { row: row_offset + p / dim, col: p % dim }),
        None => Ok(()),
    }
}

/// A single embedding in `f64`, the precision all projection arithmetic runs in.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingVector(Vec<f64>);

impl EmbeddingVector {
    pub fn new(data: Vec<f64>) -> Result<Self> {
        if data.is_empty() {
            return Err(Error::Data("empty vector".into()));
        }
        if let Some(col) = data.iter().position(|x| !x.is_finite()) {
            return Err(Error::NonFinite { row: 0, col });
        }
        Ok(Self(data))
    }

    pub fn zeros(dim: usize) -> Self {
        Self(vec![0.0; dim])
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.0
    }

    pub fn norm(&self) -> f64 {
        crate::linalg::norm(&self.0)
    }

    pub(crate) fn from_vec_unchecked(data: Vec<f64>) -> Self {
        Self(data)
    }
}

impl AsRef<[f64]> for EmbeddingVector {
    fn as_ref(&self) -> &[f64] {
        &self.0
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_non_finite_with_position() {
        let err = EmbeddingMatrix::new(2, 3, vec![1.0, f32::NAN, 3.0, 4.0, 5.0, 6.0]).unwrap_err();
        assert!(matches!(err, Error::NonFinite { row: 0, col: 1 }));
        let err = EmbeddingMatrix::new(2, 2, vec![1.0, 2.0, 3.0, f32::INFINITY]).unwrap_err();
        assert!(matches!(err, Error::NonFinite { row: 1, col: 1 }));
    }

    #[test]
    fn rejects_empty_and_ragged() {
        assert!(EmbeddingMatrix::new(0, 3, vec![]).is_err());
        assert!(EmbeddingMatrix::new(2, 2, vec![1.0; 3]).is_err());
        assert!(EmbeddingMatrix::from_rows(&[vec![1.0, 2.0], vec![3.0]]).is_err());
    }

    #[test]
    fn select_rows_keeps_requested_order() {
        let m = EmbeddingMatrix::from_rows(&[[1.0], [2.0], [3.0]]).unwrap();
        let s = m.select_rows(&[2, 0]).unwrap();
        assert_eq!(s.as_slice(), &[3.0, 1.0]);
        assert!(m.select_rows(&[3]).is_err());
    }
}
