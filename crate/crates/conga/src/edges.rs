//! Symmetric edge-weight storage over node pairs (j, l), j < l.

use serde::{Deserialize, Serialize};

use crate::error::{CongaError, Result};

/// Edge weights beta_{jl} for an undirected graph on `p` nodes, stored as a
/// length `p(p-1)/2` vector in row-major upper-triangular order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EdgeWeights {
    p: usize,
    beta: Vec<f64>,
}

impl EdgeWeights {
    pub fn zeros(p: usize) -> Result<Self> {
        if p < 2 {
            return Err(CongaError::InvalidParameter(
                "edge weights need at least two nodes".into(),
            ));
        }
        Ok(EdgeWeights {
            p,
            beta: vec![0.0; p * (p - 1) / 2],
        })
    }

    pub fn from_vec(p: usize, beta: Vec<f64>) -> Result<Self> {
        if beta.len() != p * (p - 1) / 2 {
            return Err(CongaError::ShapeMismatch(format!(
                "expected {} edge weights for p={}, got {}",
                p * (p - 1) / 2,
                p,
                beta.len()
            )));
        }
        Ok(EdgeWeights { p, beta })
    }

    pub fn p(&self) -> usize {
        self.p
    }

    pub fn q(&self) -> usize {
        self.beta.len()
    }

    /// Flat index of the unordered pair (j, l). Panics if j == l.
    #[inline]
    pub fn index(&self, j: usize, l: usize) -> usize {
        assert!(j != l, "no self-edges");
        let (j, l) = if j < l { (j, l) } else { (l, j) };
        j * self.p - j * (j + 1) / 2 + (l - j - 1)
    }

    /// Inverse of `index`.
    pub fn pair(&self, idx: usize) -> (usize, usize) {
        let mut idx = idx;
        for j in 0..self.p - 1 {
            let row = self.p - 1 - j;
            if idx < row {
                return (j, j + 1 + idx);
            }
            idx -= row;
        }
        panic!("edge index out of range");
    }

    #[inline]
    pub fn weight(&self, j: usize, l: usize) -> f64 {
        self.beta[self.index(j, l)]
    }

    #[inline]
    pub fn set_weight(&mut self, j: usize, l: usize, value: f64) {
        let idx = self.index(j, l);
        self.beta[idx] = value;
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.beta
    }

    pub fn pairs(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        let p = self.p;
        (0..p).flat_map(move |j| (j + 1..p).map(move |l| (j, l)))
    }
}
