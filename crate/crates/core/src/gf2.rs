//! Dense bit-packed rows over GF(2).

/// A row of bits packed into 64-bit words.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BitRow {
    words: Vec<u64>,
    len: usize,
}

impl BitRow {
    pub fn zeros(len: usize) -> Self {
        BitRow {
            words: vec![0; len.div_ceil(64)],
            len,
        }
    }

    pub fn from_indices(len: usize, ones: &[usize]) -> Self {
        let mut row = Self::zeros(len);
        for &i in ones {
            row.flip(i);
        }
        row
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    #[inline]
    pub fn get(&self, i: usize) -> bool {
        (self.words[i / 64] >> (i % 64)) & 1 == 1
    }

    #[inline]
    pub fn set(&mut self, i: usize, v: bool) {
        let mask = 1u64 << (i % 64);
        if v {
            self.words[i / 64] |= mask;
        } else {
            self.words[i / 64] &= !mask;
        }
    }

    #[inline]
    pub fn flip(&mut self, i: usize) {
        self.words[i / 64] ^= 1u64 << (i % 64);
    }

    /// `self ^= other`
    #[inline]
    pub fn xor_assign(&mut self, other: &BitRow) {
        for (a, b) in self.words.iter_mut().zip(&other.words) {
            *a ^= b;
        }
    }

    /// Parity of the bitwise AND with `other`.
    #[inline]
    pub fn dot(&self, other: &BitRow) -> bool {
        self.words
            .iter()
            .zip(&other.words)
            .fold(0u32, |acc, (a, b)| acc ^ (a & b).count_ones())
            & 1
            == 1
    }

    pub fn count_ones(&self) -> usize {
        self.words.iter().map(|w| w.count_ones() as usize).sum()
    }

    pub fn is_zero(&self) -> bool {
        self.words.iter().all(|&w| w == 0)
    }
}

/// Rank of a set of rows over GF(2). The rows are consumed.
pub fn rank(mut rows: Vec<BitRow>) -> usize {
    let ncols = rows.first().map_or(0, BitRow::len);
    let mut r = 0;
    for col in 0..ncols {
        let Some(p) = (r..rows.len()).find(|&k| rows[k].get(col)) else {
            continue;
        };
        rows.swap(r, p);
        let pivot = rows[r].clone();
        for row in rows.iter_mut().skip(r + 1) {
            if row.get(col) {
                row.xor_assign(&pivot);
            }
        }
        r += 1;
        if r == rows.len() {
            break;
        }
    }
    r
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rank_of_small_matrices() {
        let rows = vec![
            BitRow::from_indices(3, &[0, 1]),
            BitRow::from_indices(3, &[1, 2]),
        ];
        assert_eq!(rank(rows), 2);
        let dup = vec![
            BitRow::from_indices(2, &[0, 1]),
            BitRow::from_indices(2, &[0, 1]),
        ];
        assert_eq!(rank(dup), 1);
        let dependent = vec![
            BitRow::from_indices(70, &[0, 65]),
            BitRow::from_indices(70, &[65, 69]),
            BitRow::from_indices(70, &[0, 69]),
        ];
        assert_eq!(rank(dependent), 2);
    }

    #[test]
    fn dot_and_flip() {
        let mut a = BitRow::zeros(130);
        a.flip(3);
        a.flip(129);
        let b = BitRow::from_indices(130, &[3, 100, 129]);
        assert!(!a.dot(&b));
        a.set(100, true);
        assert!(a.dot(&b));
        assert_eq!(a.count_ones(), 3);
    }
}
