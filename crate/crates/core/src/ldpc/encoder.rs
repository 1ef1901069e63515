use super::ParityCheckMatrix;
use crate::error::{Error, Result};
use crate::gf2::BitRow;

/// Systematic encoder obtained by Gaussian elimination of H.
///
/// `perm[..k]` are the free (message) columns and `perm[k..]` the pivot
/// columns. Pivot column `perm[k + r]` equals the parity of the message bits
/// selected by `parity[r]`.
#[derive(Clone, Debug)]
pub struct GeneratorSpec {
    n: usize,
    k: usize,
    perm: Vec<usize>,
    parity: Vec<BitRow>,
}

/// Row-reduce H over GF(2), taking at each step the lowest-index column that
/// still has a pivot available. Rank deficiency just enlarges K.
pub fn derive_generator(h: &ParityCheckMatrix) -> GeneratorSpec {
    let n = h.n_vars();
    let mut rows: Vec<BitRow> = h
        .check_rows()
        .iter()
        .map(|r| BitRow::from_indices(n, r))
        .collect();
    let mut pivots = Vec::new();
    let mut r = 0;
    for col in 0..n {
        if r == rows.len() {
            break;
        }
        let Some(p) = (r..rows.len()).find(|&k| rows[k].get(col)) else {
            continue;
        };
        rows.swap(r, p);
        let pivot = rows[r].clone();
        for (k, row) in rows.iter_mut().enumerate() {
            if k != r && row.get(col) {
                row.xor_assign(&pivot);
            }
        }
        pivots.push(col);
        r += 1;
    }
    let rank = pivots.len();
    let mut is_pivot = vec![false; n];
    for &c in &pivots {
        is_pivot[c] = true;
    }
    let free: Vec<usize> = (0..n).filter(|&c| !is_pivot[c]).collect();
    let k = free.len();
    let parity = rows[..rank]
        .iter()
        .map(|row| {
            let mut p = BitRow::zeros(k);
            for (m, &c) in free.iter().enumerate() {
                if row.get(c) {
                    p.set(m, true);
                }
            }
            p
        })
        .collect();
    let mut perm = free;
    perm.extend_from_slice(&pivots);
    GeneratorSpec { n, k, perm, parity }
}

impl GeneratorSpec {
    pub fn n(&self) -> usize {
        self.n
    }

    /// Message length K = N - rank(H).
    pub fn k(&self) -> usize {
        self.k
    }

    pub fn rank(&self) -> usize {
        self.n - self.k
    }

    pub fn rate(&self) -> f64 {
        self.k as f64 / self.n as f64
    }

    pub fn permutation(&self) -> &[usize] {
        &self.perm
    }

    /// Dense generator matrix rows (K x N) in the original column order.
    pub fn generator_rows(&self) -> Vec<BitRow> {
        (0..self.k)
            .map(|m| {
                let mut g = BitRow::zeros(self.n);
                g.set(self.perm[m], true);
                for (r, p) in self.parity.iter().enumerate() {
                    if p.get(m) {
                        g.set(self.perm[self.k + r], true);
                    }
                }
                g
            })
            .collect()
    }

    pub fn encode(&self, msg: &[u8]) -> Result<Vec<u8>> {
        if msg.len() != self.k {
            return Err(Error::LengthMismatch {
                expected: self.k,
                got: msg.len(),
            });
        }
        let mut packed = BitRow::zeros(self.k);
        let mut x = vec![0u8; self.n];
        for (m, &b) in msg.iter().enumerate() {
            if b & 1 == 1 {
                packed.set(m, true);
                x[self.perm[m]] = 1;
            }
        }
        for (r, p) in self.parity.iter().enumerate() {
            x[self.perm[self.k + r]] = u8::from(p.dot(&packed));
        }
        Ok(x)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::CounterRng;

    #[test]
    fn repetition_code() {
        let h = ParityCheckMatrix::from_dense(&[[1u8, 1, 0], [0, 1, 1]]).unwrap();
        let g = derive_generator(&h);
        assert_eq!(g.k(), 1);
        assert_eq!(g.encode(&[1]).unwrap(), vec![1, 1, 1]);
        assert_eq!(g.encode(&[0]).unwrap(), vec![0, 0, 0]);
        assert!(g.encode(&[0, 1]).is_err());
    }

    #[test]
    fn rank_deficient_duplicate_rows() {
        let h = ParityCheckMatrix::from_dense(&[[1u8, 1], [1, 1]]).unwrap();
        let g = derive_generator(&h);
        assert_eq!(g.rank(), 1);
        assert_eq!(g.k(), 1);
        assert_eq!(g.encode(&[1]).unwrap(), vec![1, 1]);
    }

    #[test]
    fn hamming_codewords_satisfy_checks() {
        let h = ParityCheckMatrix::from_dense(&[
            [1u8, 0, 0, 1, 1, 0, 1],
            [0, 1, 0, 1, 0, 1, 1],
            [0, 0, 1, 0, 1, 1, 1],
        ])
        .unwrap();
        let g = derive_generator(&h);
        assert_eq!(g.k(), 4);
        for m in 0..16u8 {
            let msg: Vec<u8> = (0..4).map(|b| (m >> b) & 1).collect();
            assert!(h.is_codeword(&g.encode(&msg).unwrap()));
        }
        for row in g.generator_rows() {
            let bits: Vec<u8> = (0..7).map(|i| u8::from(row.get(i))).collect();
            assert!(h.is_codeword(&bits));
        }
        let mut sorted = g.permutation().to_vec();
        sorted.sort_unstable();
        assert_eq!(sorted, (0..7).collect::<Vec<_>>());
    }

    #[test]
    fn random_sparse_matrix_encodes_into_null_space() {
        let mut rng = CounterRng::new(5);
        let rows: Vec<Vec<usize>> = (0..20)
            .map(|_| {
                let mut r: Vec<usize> = (0..40).filter(|_| rng.below(6) == 0).collect();
                r.dedup();
                r
            })
            .collect();
        let h = ParityCheckMatrix::new(40, rows).unwrap();
        let g = derive_generator(&h);
        assert_eq!(g.rank(), h.rank());
        for _ in 0..50 {
            let msg: Vec<u8> = (0..g.k()).map(|_| rng.next_bit()).collect();
            assert!(h.is_codeword(&g.encode(&msg).unwrap()));
        }
    }
}
