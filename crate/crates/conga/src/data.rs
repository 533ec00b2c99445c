//! Count data container and CSV ingestion.

use std::path::Path;

use crate::error::{CongaError, Result};

/// An `n x P` matrix of nonnegative integer observations. Rows are
/// observations, columns are graph nodes.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CountMatrix {
    values: Vec<u64>,
    n: usize,
    p: usize,
}

impl CountMatrix {
    pub fn new(n: usize, p: usize, values: Vec<u64>) -> Result<Self> {
        if n < 1 {
            return Err(CongaError::InvalidParameter(
                "need at least one observation".into(),
            ));
        }
        if p < 2 {
            return Err(CongaError::InvalidParameter(
                "need at least two nodes".into(),
            ));
        }
        if values.len() != n * p {
            return Err(CongaError::ShapeMismatch(format!(
                "expected {} values for {}x{}, got {}",
                n * p,
                n,
                p,
                values.len()
            )));
        }
        Ok(CountMatrix { values, n, p })
    }

    pub fn from_rows(rows: &[Vec<u64>]) -> Result<Self> {
        let n = rows.len();
        let p = rows.first().map(|r| r.len()).unwrap_or(0);
        if rows.iter().any(|r| r.len() != p) {
            return Err(CongaError::ShapeMismatch("ragged rows".into()));
        }
        Self::new(n, p, rows.concat())
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn p(&self) -> usize {
        self.p
    }

    #[inline]
    pub fn get(&self, t: usize, j: usize) -> u64 {
        self.values[t * self.p + j]
    }

    pub fn row(&self, t: usize) -> &[u64] {
        &self.values[t * self.p..(t + 1) * self.p]
    }

    pub fn column(&self, j: usize) -> impl Iterator<Item = u64> + '_ {
        (0..self.n).map(move |t| self.get(t, j))
    }

    pub fn max(&self) -> u64 {
        self.values.iter().copied().max().unwrap_or(0)
    }

    /// Index of the first entry exceeding `b`, if any.
    pub fn first_exceeding(&self, b: usize) -> Option<(usize, usize, u64)> {
        for t in 0..self.n {
            for j in 0..self.p {
                let v = self.get(t, j);
                if v > b as u64 {
                    return Some((t, j, v));
                }
            }
        }
        None
    }

    /// Reads a counts CSV. A header row is detected by a non-numeric first
    /// row and skipped.
    pub fn read_csv(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::parse_csv(&text)
    }

    pub fn parse_csv(text: &str) -> Result<Self> {
        let mut rows: Vec<Vec<u64>> = Vec::new();
        let mut lines = text
            .lines()
            .enumerate()
            .filter(|(_, l)| !l.trim().is_empty())
            .peekable();

        // Header detection: first non-empty row with any non-numeric field.
        if let Some((_, first)) = lines.peek() {
            let is_header = first
                .split(',')
                .any(|f| f.trim().parse::<u64>().is_err());
            if is_header {
                lines.next();
            }
        }

        for (line_no, line) in lines {
            let mut row = Vec::new();
            for (col, field) in line.split(',').enumerate() {
                let v = field.trim().parse::<u64>().map_err(|e| CongaError::Parse {
                    row: line_no + 1,
                    col: col + 1,
                    msg: format!("{e} (field {field:?})"),
                })?;
                row.push(v);
            }
            rows.push(row);
        }
        if rows.is_empty() {
            return Err(CongaError::Parse {
                row: 0,
                col: 0,
                msg: "no data rows".into(),
            });
        }
        Self::from_rows(&rows)
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut out = String::new();
        for t in 0..self.n {
            let row: Vec<String> = self.row(t).iter().map(|v| v.to_string()).collect();
            out.push_str(&row.join(","));
            out.push('\n');
        }
        std::fs::write(path, out)?;
        Ok(())
    }
}
