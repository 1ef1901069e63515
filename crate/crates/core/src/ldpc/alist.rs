//! MacKay alist format.
//!
//! ```text
//! N M
//! max_col_degree max_row_degree
//! col_degree_1 ... col_degree_N
//! row_degree_1 ... row_degree_M
//! <N lines: 1-based check indices of each column, zero padded>
//! <M lines: 1-based variable indices of each row, zero padded>
//! ```

use std::fmt::Write as _;
use std::path::Path;

use super::ParityCheckMatrix;
use crate::error::{Error, Result};

struct Lines<'a> {
    inner: std::iter::Enumerate<std::str::Lines<'a>>,
    last: usize,
}

impl<'a> Lines<'a> {
    fn new(text: &'a str) -> Self {
        Lines {
            inner: text.lines().enumerate(),
            last: 0,
        }
    }

    /// Next non-blank line as parsed integers, with its 1-based line number.
    fn next_numbers(&mut self, what: &str) -> Result<(usize, Vec<usize>)> {
        for (idx, line) in self.inner.by_ref() {
            let line_no = idx + 1;
            self.last = line_no;
            if line.trim().is_empty() {
                continue;
            }
            let nums = line
                .split_whitespace()
                .map(|t| {
                    t.parse::<usize>()
                        .map_err(|_| Error::alist(line_no, format!("bad integer {t:?} in {what}")))
                })
                .collect::<Result<Vec<_>>>()?;
            return Ok((line_no, nums));
        }
        Err(Error::alist(self.last + 1, format!("unexpected end of input, expected {what}")))
    }

    fn exact(&mut self, count: usize, what: &str) -> Result<(usize, Vec<usize>)> {
        let (line, nums) = self.next_numbers(what)?;
        if nums.len() != count {
            return Err(Error::alist(
                line,
                format!("{what}: expected {count} values, found {}", nums.len()),
            ));
        }
        Ok((line, nums))
    }

    /// An index list: zero entries are padding, the rest must be in `1..=bound`.
    fn index_list(&mut self, degree: usize, bound: usize, what: &str) -> Result<(usize, Vec<usize>)> {
        let (line, nums) = self.next_numbers(what)?;
        let idx: Vec<usize> = nums.into_iter().filter(|&v| v != 0).collect();
        if idx.len() != degree {
            return Err(Error::alist(
                line,
                format!("{what}: degree {degree} declared, {} indices listed", idx.len()),
            ));
        }
        if let Some(&bad) = idx.iter().find(|&&v| v > bound) {
            return Err(Error::alist(line, format!("{what}: index {bad} out of range 1..={bound}")));
        }
        Ok((line, idx.into_iter().map(|v| v - 1).collect()))
    }
}

pub fn parse_alist(text: &str) -> Result<ParityCheckMatrix> {
    let mut lines = Lines::new(text);
    let (hl, header) = lines.exact(2, "header N M")?;
    let (n, m) = (header[0], header[1]);
    if n == 0 || m == 0 {
        return Err(Error::alist(hl, "N and M must be positive"));
    }
    let (ml, max) = lines.exact(2, "maximum degrees")?;
    let (col_line, col_deg) = lines.exact(n, "column degrees")?;
    let (row_line, row_deg) = lines.exact(m, "row degrees")?;
    if col_deg.iter().copied().max() != Some(max[0]) || row_deg.iter().copied().max() != Some(max[1]) {
        return Err(Error::alist(ml, "maximum degrees disagree with degree lists"));
    }
    if col_deg.iter().sum::<usize>() != row_deg.iter().sum::<usize>() {
        return Err(Error::alist(row_line, format!(
            "edge count mismatch: columns sum to {}, rows sum to {} (column degrees on line {col_line})",
            col_deg.iter().sum::<usize>(),
            row_deg.iter().sum::<usize>()
        )));
    }

    let mut cols = Vec::with_capacity(n);
    for (i, &d) in col_deg.iter().enumerate() {
        let (line, mut list) = lines.index_list(d, m, &format!("column {}", i + 1))?;
        list.sort_unstable();
        if list.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::alist(line, format!("column {}: repeated check index", i + 1)));
        }
        cols.push(list);
    }
    let mut rows = Vec::with_capacity(m);
    let mut row_lines = Vec::with_capacity(m);
    for (j, &d) in row_deg.iter().enumerate() {
        let (line, mut list) = lines.index_list(d, n, &format!("row {}", j + 1))?;
        list.sort_unstable();
        if list.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::alist(line, format!("row {}: repeated variable index", j + 1)));
        }
        rows.push(list);
        row_lines.push(line);
    }

    // transpose consistency
    let mut from_rows = vec![Vec::new(); n];
    for (j, row) in rows.iter().enumerate() {
        for &i in row {
            from_rows[i].push(j);
        }
    }
    for (j, row) in rows.iter().enumerate() {
        for &i in row {
            if cols[i].binary_search(&j).is_err() {
                return Err(Error::alist(
                    row_lines[j],
                    format!("row {} lists variable {} but column {} omits check {}", j + 1, i + 1, i + 1, j + 1),
                ));
            }
        }
    }
    debug_assert!(from_rows.iter().zip(&cols).all(|(a, b)| a == b));

    let h = ParityCheckMatrix::new(n, rows)?;
    debug_assert_eq!(h.var_cols(), cols.as_slice());
    Ok(h)
}

pub fn read_alist(path: impl AsRef<Path>) -> Result<ParityCheckMatrix> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_alist(&text)
}

/// Serialize in the zero-padded archive dialect.
pub fn write_alist(h: &ParityCheckMatrix) -> String {
    let col_deg = h.column_degrees();
    let row_deg = h.row_degrees();
    let max_c = col_deg.iter().copied().max().unwrap_or(0);
    let max_r = row_deg.iter().copied().max().unwrap_or(0);
    let mut out = String::new();
    let join = |v: &mut dyn Iterator<Item = usize>| {
        v.map(|x| x.to_string()).collect::<Vec<_>>().join(" ")
    };
    let _ = writeln!(out, "{} {}", h.n_vars(), h.n_checks());
    let _ = writeln!(out, "{max_c} {max_r}");
    let _ = writeln!(out, "{}", join(&mut col_deg.iter().copied()));
    let _ = writeln!(out, "{}", join(&mut row_deg.iter().copied()));
    for col in h.var_cols() {
        let padded = col.iter().map(|&j| j + 1).chain(std::iter::repeat(0)).take(max_c);
        let _ = writeln!(out, "{}", join(&mut padded.into_iter()));
    }
    for row in h.check_rows() {
        let padded = row.iter().map(|&i| i + 1).chain(std::iter::repeat(0)).take(max_r);
        let _ = writeln!(out, "{}", join(&mut padded.into_iter()));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    const CHAIN: &str = "3 2\n2 2\n1 2 1\n2 2\n1 0\n1 2\n2 0\n1 2\n2 3\n";

    #[test]
    fn parses_two_check_chain() {
        let h = parse_alist(CHAIN).unwrap();
        assert_eq!(h.n_vars(), 3);
        assert_eq!(h.n_checks(), 2);
        assert_eq!(h.column_degrees(), vec![1, 2, 1]);
        assert_eq!(h.row_degrees(), vec![2, 2]);
        assert_eq!(h.row(0), &[0, 1]);
        assert_eq!(h.row(1), &[1, 2]);
    }

    #[test]
    fn accepts_unpadded_lists() {
        let text = "3 2\n2 2\n1 2 1\n2 2\n1\n1 2\n2\n1 2\n2 3\n";
        assert_eq!(parse_alist(text).unwrap(), parse_alist(CHAIN).unwrap());
    }

    #[test]
    fn round_trip() {
        let h = parse_alist(CHAIN).unwrap();
        assert_eq!(parse_alist(&write_alist(&h)).unwrap(), h);
    }

    fn line_of(err: Error) -> usize {
        match err {
            Error::Alist { line, .. } => line,
            other => panic!("unexpected error {other}"),
        }
    }

    #[test]
    fn malformed_header_reports_line() {
        assert_eq!(line_of(parse_alist("3\n").unwrap_err()), 1);
        assert_eq!(line_of(parse_alist("3 x\n").unwrap_err()), 1);
        assert_eq!(line_of(parse_alist("").unwrap_err()), 1);
    }

    #[test]
    fn index_out_of_range_reports_line() {
        let text = "3 2\n2 2\n1 2 1\n2 2\n1 0\n1 2\n2 0\n1 2\n2 4\n";
        assert_eq!(line_of(parse_alist(text).unwrap_err()), 9);
    }

    #[test]
    fn transpose_mismatch_reports_line() {
        // row 2 claims variables 1 and 3; column lists say 2 and 3
        let text = "3 2\n2 2\n1 2 1\n2 2\n1 0\n1 2\n2 0\n1 2\n1 3\n";
        assert_eq!(line_of(parse_alist(text).unwrap_err()), 9);
    }

    #[test]
    fn degree_mismatch_reports_line() {
        let text = "3 2\n2 2\n1 2 1\n2 2\n1 2\n1 2\n2 0\n1 2\n2 3\n";
        assert_eq!(line_of(parse_alist(text).unwrap_err()), 5);
    }
}
