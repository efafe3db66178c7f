//! Parity-check matrices and the alist exchange format.
//!
//! An alist file lists, 1-based:
//!
//! ```text
//! N M
//! max_col_degree max_row_degree
//! <N column degrees>
//! <M row degrees>
//! <N lines: checks adjacent to each variable>
//! <M lines: variables adjacent to each check>
//! ```
//!
//! Neighbour lists may be padded with `0` entries up to the maximum degree;
//! padding is skipped on input. Output always uses the padded dialect.

use alloc::collections::BTreeSet;
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt::{self, Write as _};

use crate::error::{Error, Result};

/// Failure to read or validate a parity-check matrix. `line` is the 1-based
/// line of the alist text that caused it, or 0 for matrices built in code.
#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("{}{kind}", LinePrefix(*.line))]
pub struct AlistError {
    pub line: usize,
    pub kind: AlistErrorKind,
}

struct LinePrefix(usize);

impl fmt::Display for LinePrefix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.0 > 0 {
            write!(f, "alist line {}: ", self.0)
        } else {
            Ok(())
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum AlistErrorKind {
    #[error("unexpected end of input")]
    UnexpectedEof,
    #[error("cannot parse {0:?} as a non-negative integer")]
    BadInteger(String),
    #[error("expected {expected} entries, found {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("index {index} out of range 1..={bound}")]
    IndexOutOfRange { index: usize, bound: usize },
    #[error("index {0} listed twice")]
    DuplicateIndex(usize),
    #[error("declared degree {declared} exceeds maximum degree {max}")]
    DegreeAboveMax { declared: usize, max: usize },
    #[error("column and row neighbour lists disagree")]
    Inconsistent,
    #[error("check {check} has degree {degree}; at least 3 is required")]
    DegreeTooLow { check: usize, degree: usize },
    #[error("matrix has no variables or no checks")]
    Empty,
}

impl AlistError {
    fn at(line: usize, kind: AlistErrorKind) -> Self {
        AlistError { line, kind }
    }
}

/// Binary `M x N` parity-check matrix stored as sorted, 0-based row supports.
///
/// Every check has degree at least 3. Immutable once built.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParityCheckMatrix {
    n_vars: usize,
    rows: Vec<Vec<usize>>,
}

impl ParityCheckMatrix {
    /// Builds a matrix from per-check variable lists (0-based, any order).
    pub fn from_rows(n_vars: usize, rows: Vec<Vec<usize>>) -> Result<Self, AlistError> {
        Self::validate(n_vars, rows, |_| 0)
    }

    fn validate(
        n_vars: usize,
        mut rows: Vec<Vec<usize>>,
        line_of_row: impl Fn(usize) -> usize,
    ) -> Result<Self, AlistError> {
        if n_vars == 0 || rows.is_empty() {
            return Err(AlistError::at(0, AlistErrorKind::Empty));
        }
        for (j, row) in rows.iter_mut().enumerate() {
            let line = line_of_row(j);
            row.sort_unstable();
            if let Some(&bad) = row.iter().find(|&&i| i >= n_vars) {
                return Err(AlistError::at(
                    line,
                    AlistErrorKind::IndexOutOfRange { index: bad + 1, bound: n_vars },
                ));
            }
            if let Some(w) = row.windows(2).find(|w| w[0] == w[1]) {
                return Err(AlistError::at(line, AlistErrorKind::DuplicateIndex(w[0] + 1)));
            }
            if row.len() < 3 {
                return Err(AlistError::at(
                    line,
                    AlistErrorKind::DegreeTooLow { check: j + 1, degree: row.len() },
                ));
            }
        }
        Ok(ParityCheckMatrix { n_vars, rows })
    }

    /// Parses alist text. Errors name the offending line.
    pub fn parse_alist(text: &str) -> Result<Self, AlistError> {
        let mut lines = text
            .lines()
            .enumerate()
            .map(|(i, l)| (i + 1, l.trim()))
            .filter(|(_, l)| !l.is_empty());
        let mut last_line = 0;
        let mut next_line = |lines: &mut dyn Iterator<Item = (usize, &str)>| -> Result<(usize, Vec<usize>), AlistError> {
            let (no, l) = lines
                .next()
                .ok_or_else(|| AlistError::at(last_line + 1, AlistErrorKind::UnexpectedEof))?;
            last_line = no;
            let vals = l
                .split_whitespace()
                .map(|tok| {
                    tok.parse::<usize>()
                        .map_err(|_| AlistError::at(no, AlistErrorKind::BadInteger(tok.into())))
                })
                .collect::<Result<Vec<_>, _>>()?;
            Ok((no, vals))
        };
        let expect_len = |no: usize, v: &[usize], n: usize| {
            if v.len() == n {
                Ok(())
            } else {
                Err(AlistError::at(no, AlistErrorKind::DimensionMismatch { expected: n, got: v.len() }))
            }
        };

        let (no, dims) = next_line(&mut lines)?;
        expect_len(no, &dims, 2)?;
        let (n, m) = (dims[0], dims[1]);
        if n == 0 || m == 0 {
            return Err(AlistError::at(no, AlistErrorKind::Empty));
        }
        let (no, maxes) = next_line(&mut lines)?;
        expect_len(no, &maxes, 2)?;
        let (max_col, max_row) = (maxes[0], maxes[1]);

        let (col_deg_line, col_deg) = next_line(&mut lines)?;
        expect_len(col_deg_line, &col_deg, n)?;
        let (row_deg_line, row_deg) = next_line(&mut lines)?;
        expect_len(row_deg_line, &row_deg, m)?;
        if let Some(&d) = col_deg.iter().find(|&&d| d > max_col) {
            return Err(AlistError::at(col_deg_line, AlistErrorKind::DegreeAboveMax { declared: d, max: max_col }));
        }
        if let Some(&d) = row_deg.iter().find(|&&d| d > max_row) {
            return Err(AlistError::at(row_deg_line, AlistErrorKind::DegreeAboveMax { declared: d, max: max_row }));
        }

        let mut read_lists = |count: usize, degrees: &[usize], bound: usize| -> Result<Vec<(usize, Vec<usize>)>, AlistError> {
            let mut out = Vec::with_capacity(count);
            for &deg in degrees.iter().take(count) {
                let (no, vals) = next_line(&mut lines)?;
                let mut list = Vec::with_capacity(deg);
                for v in vals.into_iter().filter(|&v| v != 0) {
                    if v > bound {
                        return Err(AlistError::at(no, AlistErrorKind::IndexOutOfRange { index: v, bound }));
                    }
                    list.push(v - 1);
                }
                expect_len(no, &list, deg)?;
                out.push((no, list));
            }
            Ok(out)
        };
        let cols = read_lists(n, &col_deg, m)?;
        let rows = read_lists(m, &row_deg, n)?;

        let row_lines: Vec<usize> = rows.iter().map(|(no, _)| *no).collect();
        let row_sets: Vec<Vec<usize>> = rows.into_iter().map(|(_, r)| r).collect();
        let h = Self::validate(n, row_sets, |j| row_lines[j])?;

        // Cross-check the column view against the row view.
        let edges: BTreeSet<(usize, usize)> = h
            .rows
            .iter()
            .enumerate()
            .flat_map(|(j, r)| r.iter().map(move |&i| (i, j)))
            .collect();
        let mut seen = 0usize;
        for (i, (no, col)) in cols.iter().enumerate() {
            let mut sorted = col.clone();
            sorted.sort_unstable();
            if let Some(w) = sorted.windows(2).find(|w| w[0] == w[1]) {
                return Err(AlistError::at(*no, AlistErrorKind::DuplicateIndex(w[0] + 1)));
            }
            if col.iter().any(|&j| !edges.contains(&(i, j))) {
                return Err(AlistError::at(*no, AlistErrorKind::Inconsistent));
            }
            seen += col.len();
        }
        if seen != edges.len() {
            // Some row lists an edge that no column does; blame the first such row.
            let col_edges: BTreeSet<(usize, usize)> = cols
                .iter()
                .enumerate()
                .flat_map(|(i, (_, c))| c.iter().map(move |&j| (i, j)))
                .collect();
            let bad = edges.iter().find(|e| !col_edges.contains(e)).map(|&(_, j)| j).unwrap_or(0);
            return Err(AlistError::at(row_lines[bad], AlistErrorKind::Inconsistent));
        }
        Ok(h)
    }

    /// Writes the matrix in the padded alist dialect.
    pub fn to_alist(&self) -> String {
        let cols = self.columns();
        let max_col = cols.iter().map(Vec::len).max().unwrap_or(0);
        let max_row = self.rows.iter().map(Vec::len).max().unwrap_or(0);
        let mut s = String::new();
        let join = |s: &mut String, it: &mut dyn Iterator<Item = usize>| {
            let mut first = true;
            for v in it {
                if !first {
                    s.push(' ');
                }
                first = false;
                let _ = write!(s, "{v}");
            }
            s.push('\n');
        };
        let _ = writeln!(s, "{} {}", self.n_vars, self.n_checks());
        let _ = writeln!(s, "{max_col} {max_row}");
        join(&mut s, &mut cols.iter().map(Vec::len));
        join(&mut s, &mut self.rows.iter().map(Vec::len));
        for c in &cols {
            join(&mut s, &mut c.iter().map(|j| j + 1).chain(core::iter::repeat(0).take(max_col - c.len())));
        }
        for r in &self.rows {
            join(&mut s, &mut r.iter().map(|i| i + 1).chain(core::iter::repeat(0).take(max_row - r.len())));
        }
        s
    }

    /// Code length N.
    pub fn n_vars(&self) -> usize {
        self.n_vars
    }

    /// Number of checks M.
    pub fn n_checks(&self) -> usize {
        self.rows.len()
    }

    /// Sorted variable indices of every check.
    pub fn rows(&self) -> &[Vec<usize>] {
        &self.rows
    }

    pub fn row_degrees(&self) -> impl Iterator<Item = usize> + '_ {
        self.rows.iter().map(Vec::len)
    }

    /// Sorted check indices of every variable.
    pub fn columns(&self) -> Vec<Vec<usize>> {
        let mut cols = alloc::vec![Vec::new(); self.n_vars];
        for (j, r) in self.rows.iter().enumerate() {
            for &i in r {
                cols[i].push(j);
            }
        }
        cols
    }

    /// Index of the first unsatisfied check, if any.
    pub fn first_failed_check(&self, x: &[u8]) -> Result<Option<usize>> {
        if x.len() != self.n_vars {
            return Err(Error::LengthMismatch { what: "codeword", expected: self.n_vars, got: x.len() });
        }
        Ok(self
            .rows
            .iter()
            .position(|r| r.iter().fold(0u8, |acc, &i| acc ^ (x[i] & 1)) != 0))
    }

    /// True iff `x` satisfies every parity check.
    pub fn check_codeword(&self, x: &[u8]) -> Result<bool> {
        Ok(self.first_failed_check(x)?.is_none())
    }
}
