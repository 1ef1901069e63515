//! Parity-check matrices, alist I/O and a GF(2) systematic encoder.
//!
//! Bits are `u8` values in `{0, 1}`. The bipolar mapping used everywhere in
//! the crate is bit 0 -> +1, bit 1 -> -1, so the all-zero codeword is the
//! all-(+1) symbol sequence and a check is satisfied when the product of its
//! bipolar symbols is +1.

mod alist;
pub mod construct;
mod encoder;

pub use alist::{parse_alist, read_alist, write_alist};
pub use encoder::{derive_generator, GeneratorSpec};

use std::collections::BTreeMap;

use serde::Serialize;

use crate::error::{Error, Result};

/// Sparse M x N binary matrix with both row and column adjacency.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ParityCheckMatrix {
    n_vars: usize,
    check_rows: Vec<Vec<usize>>,
    var_cols: Vec<Vec<usize>>,
}

impl ParityCheckMatrix {
    /// Build from per-check variable lists (0-based). Rows are sorted; a
    /// repeated index within a row is an error.
    pub fn new(n_vars: usize, mut check_rows: Vec<Vec<usize>>) -> Result<Self> {
        let mut var_cols = vec![Vec::new(); n_vars];
        for (j, row) in check_rows.iter_mut().enumerate() {
            row.sort_unstable();
            for w in row.windows(2) {
                if w[0] == w[1] {
                    return Err(Error::InvalidArgument(format!(
                        "check {j} lists variable {} twice",
                        w[0]
                    )));
                }
            }
            for &i in row.iter() {
                if i >= n_vars {
                    return Err(Error::InvalidArgument(format!(
                        "check {j} references variable {i} >= {n_vars}"
                    )));
                }
                var_cols[i].push(j);
            }
        }
        Ok(ParityCheckMatrix {
            n_vars,
            check_rows,
            var_cols,
        })
    }

    /// Build from a dense 0/1 matrix given row by row.
    pub fn from_dense<R: AsRef<[u8]>>(rows: &[R]) -> Result<Self> {
        let n = rows.first().map_or(0, |r| r.as_ref().len());
        let mut check_rows = Vec::with_capacity(rows.len());
        for r in rows {
            let r = r.as_ref();
            if r.len() != n {
                return Err(Error::LengthMismatch {
                    expected: n,
                    got: r.len(),
                });
            }
            check_rows.push(
                r.iter()
                    .enumerate()
                    .filter(|(_, &b)| b != 0)
                    .map(|(i, _)| i)
                    .collect(),
            );
        }
        Self::new(n, check_rows)
    }

    pub fn n_vars(&self) -> usize {
        self.n_vars
    }

    pub fn n_checks(&self) -> usize {
        self.check_rows.len()
    }

    pub fn check_rows(&self) -> &[Vec<usize>] {
        &self.check_rows
    }

    pub fn var_cols(&self) -> &[Vec<usize>] {
        &self.var_cols
    }

    pub fn row(&self, j: usize) -> &[usize] {
        &self.check_rows[j]
    }

    pub fn col(&self, i: usize) -> &[usize] {
        &self.var_cols[i]
    }

    pub fn edge_count(&self) -> usize {
        self.check_rows.iter().map(Vec::len).sum()
    }

    pub fn column_degrees(&self) -> Vec<usize> {
        self.var_cols.iter().map(Vec::len).collect()
    }

    pub fn row_degrees(&self) -> Vec<usize> {
        self.check_rows.iter().map(Vec::len).collect()
    }

    /// Rank of H over GF(2).
    pub fn rank(&self) -> usize {
        crate::gf2::rank(
            self.check_rows
                .iter()
                .map(|r| crate::gf2::BitRow::from_indices(self.n_vars, r))
                .collect(),
        )
    }

    /// `H x^T` over GF(2).
    pub fn syndrome(&self, bits: &[u8]) -> Result<Vec<u8>> {
        if bits.len() != self.n_vars {
            return Err(Error::LengthMismatch {
                expected: self.n_vars,
                got: bits.len(),
            });
        }
        Ok(self
            .check_rows
            .iter()
            .map(|row| row.iter().fold(0u8, |acc, &i| acc ^ (bits[i] & 1)))
            .collect())
    }

    /// Number of unsatisfied checks. `bits` must have length N.
    pub fn syndrome_weight(&self, bits: &[u8]) -> usize {
        debug_assert_eq!(bits.len(), self.n_vars);
        self.check_rows
            .iter()
            .filter(|row| row.iter().fold(0u8, |acc, &i| acc ^ bits[i]) != 0)
            .count()
    }

    pub fn is_codeword(&self, bits: &[u8]) -> bool {
        bits.len() == self.n_vars
            && self
                .check_rows
                .iter()
                .all(|row| row.iter().fold(0u8, |acc, &i| acc ^ bits[i]) == 0)
    }

    /// Summary used by the `code-info` command.
    pub fn info(&self) -> CodeInfo {
        let rank = self.rank();
        let k = self.n_vars - rank;
        let col_hist = histogram(self.column_degrees());
        let row_hist = histogram(self.row_degrees());
        CodeInfo {
            n: self.n_vars,
            m: self.n_checks(),
            k,
            rank,
            rate: k as f64 / self.n_vars as f64,
            edges: self.edge_count(),
            regular: col_hist.len() == 1 && row_hist.len() == 1,
            column_degrees: col_hist,
            row_degrees: row_hist,
        }
    }
}

fn histogram(degrees: Vec<usize>) -> BTreeMap<usize, usize> {
    let mut h = BTreeMap::new();
    for d in degrees {
        *h.entry(d).or_insert(0) += 1;
    }
    h
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CodeInfo {
    pub n: usize,
    pub m: usize,
    pub k: usize,
    pub rank: usize,
    pub rate: f64,
    pub edges: usize,
    pub regular: bool,
    /// degree -> number of variables with that degree
    pub column_degrees: BTreeMap<usize, usize>,
    /// degree -> number of checks with that degree
    pub row_degrees: BTreeMap<usize, usize>,
}

/// bit 0 -> +1, bit 1 -> -1
pub fn to_bipolar(bits: &[u8]) -> Vec<f64> {
    bits.iter()
        .map(|&b| if b & 1 == 0 { 1.0 } else { -1.0 })
        .collect()
}

/// Inverse of [`to_bipolar`]; non-negative values map to bit 0.
pub fn from_bipolar(symbols: &[f64]) -> Vec<u8> {
    symbols.iter().map(|&s| u8::from(s < 0.0)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn chain() -> ParityCheckMatrix {
        ParityCheckMatrix::from_dense(&[[1u8, 1, 0], [0, 1, 1]]).unwrap()
    }

    #[test]
    fn dense_construction_builds_both_adjacencies() {
        let h = chain();
        assert_eq!(h.n_vars(), 3);
        assert_eq!(h.n_checks(), 2);
        assert_eq!(h.column_degrees(), vec![1, 2, 1]);
        assert_eq!(h.row_degrees(), vec![2, 2]);
        assert_eq!(h.col(1), &[0, 1]);
    }

    #[test]
    fn syndrome_by_hand() {
        let h = chain();
        assert_eq!(h.syndrome(&[1, 1, 0]).unwrap(), vec![0, 1]);
        assert_eq!(h.syndrome(&[1, 1, 1]).unwrap(), vec![0, 0]);
        assert!(matches!(
            h.syndrome(&[1, 1]),
            Err(Error::LengthMismatch { expected: 3, got: 2 })
        ));
    }

    #[test]
    fn single_flip_hits_column_weight_checks() {
        let h = ParityCheckMatrix::from_dense(&[
            [1u8, 1, 0, 1, 0, 0],
            [0, 1, 1, 0, 1, 0],
            [1, 0, 1, 0, 0, 1],
            [1, 1, 1, 1, 1, 1],
        ])
        .unwrap();
        let mut x = vec![0u8; 6];
        x[2] = 1;
        let s = h.syndrome(&x).unwrap();
        assert_eq!(s.iter().filter(|&&b| b == 1).count(), h.col(2).len());
    }

    #[test]
    fn rejects_duplicates_and_out_of_range() {
        assert!(ParityCheckMatrix::new(3, vec![vec![0, 0]]).is_err());
        assert!(ParityCheckMatrix::new(3, vec![vec![0, 3]]).is_err());
    }

    #[test]
    fn bipolar_mapping() {
        assert_eq!(to_bipolar(&[0]), vec![1.0]);
        assert_eq!(to_bipolar(&[1]), vec![-1.0]);
        assert_eq!(to_bipolar(&[0, 1, 1, 0]), vec![1.0, -1.0, -1.0, 1.0]);
        assert_eq!(from_bipolar(&to_bipolar(&[0, 1, 1, 0])), vec![0, 1, 1, 0]);
    }

    #[test]
    fn info_of_toy_code() {
        let info = chain().info();
        assert_eq!((info.n, info.m, info.k, info.rank), (3, 2, 1, 2));
        assert!((info.rate - 1.0 / 3.0).abs() < 1e-15);
        assert!(!info.regular);
        assert_eq!(info.edges, 4);
    }
}
