//! Cascaded three-variable formulation of the parity checks.
//!
//! A degree-`d` check over sorted variables `i_1 < ... < i_d` is split into a
//! chain of `d - 2` three-variable checks linked by `d - 3` auxiliary bits:
//!
//! ```text
//! (i_1, i_2, a_1), (a_1, i_3, a_2), ..., (a_{d-3}, i_{d-1}, i_d)
//! ```
//!
//! Each three-variable check `[x_1 + x_2 + x_3]_2 = 0` over binary `x` is
//! equivalent to `T x <= t` with
//!
//! ```text
//!     [  1 -1 -1 ]        [ 0 ]
//! T = [ -1  1 -1 ],   t = [ 0 ]
//!     [ -1 -1  1 ]        [ 0 ]
//!     [  1  1  1 ]        [ 2 ]
//! ```
//!
//! Stacking the blocks gives `A u <= b` over `u = [x; x_aux]`. `A` is never
//! materialized; all products walk the triples. Because the columns of `A`
//! are orthogonal, `A^T A` is diagonal and stored as `e`.

use alloc::vec;
use alloc::vec::Vec;

use crate::code::ParityCheckMatrix;
use crate::error::{Error, Result};

/// Per-block bound `t`; `b` repeats it once per triple.
pub const T_BOUND: [f64; 4] = [0.0, 0.0, 0.0, 2.0];

/// Indices into the extended variable vector `u` of one three-variable check.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct EquationTriple(pub [usize; 3]);

/// The compiled inequality system `A u <= b` of a parity-check matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct CascadedSystem {
    n_orig: usize,
    n_aux: usize,
    triples: Vec<EquationTriple>,
    triple_check: Vec<usize>,
    e: Vec<f64>,
}

impl CascadedSystem {
    /// Chain-decomposes every check of `h`, auxiliaries numbered consecutively
    /// in check order starting at `N`.
    pub fn build(h: &ParityCheckMatrix) -> Self {
        let n = h.n_vars();
        let n_aux: usize = h.row_degrees().map(|d| d - 3).sum();
        let n_triples: usize = h.row_degrees().map(|d| d - 2).sum();
        let mut triples = Vec::with_capacity(n_triples);
        let mut triple_check = Vec::with_capacity(n_triples);
        let mut next_aux = n;
        for (j, row) in h.rows().iter().enumerate() {
            let d = row.len();
            if d == 3 {
                triples.push(EquationTriple([row[0], row[1], row[2]]));
                triple_check.push(j);
                continue;
            }
            let mut carry = next_aux;
            triples.push(EquationTriple([row[0], row[1], carry]));
            triple_check.push(j);
            next_aux += 1;
            for &var in &row[2..d - 2] {
                triples.push(EquationTriple([carry, var, next_aux]));
                triple_check.push(j);
                carry = next_aux;
                next_aux += 1;
            }
            triples.push(EquationTriple([carry, row[d - 2], row[d - 1]]));
            triple_check.push(j);
        }
        debug_assert_eq!(next_aux, n + n_aux);
        debug_assert_eq!(triples.len(), n_triples);

        let mut e = vec![0.0; n + n_aux];
        for t in &triples {
            for &i in &t.0 {
                e[i] += 4.0;
            }
        }
        CascadedSystem { n_orig: n, n_aux, triples, triple_check, e }
    }

    /// Number of code bits N.
    pub fn n_orig(&self) -> usize {
        self.n_orig
    }

    /// Number of auxiliary bits.
    pub fn n_aux(&self) -> usize {
        self.n_aux
    }

    /// Length of `u`: `N + n_aux`.
    pub fn n_vars(&self) -> usize {
        self.n_orig + self.n_aux
    }

    /// Number of three-variable checks.
    pub fn n_triples(&self) -> usize {
        self.triples.len()
    }

    /// Number of rows of `A` (four per triple).
    pub fn n_rows(&self) -> usize {
        4 * self.triples.len()
    }

    pub fn triples(&self) -> &[EquationTriple] {
        &self.triples
    }

    /// `diag(A^T A)`; four times the number of triples containing each variable.
    pub fn e(&self) -> &[f64] {
        &self.e
    }

    /// Entry `r` of `b`.
    #[inline]
    pub fn b(&self, row: usize) -> f64 {
        T_BOUND[row & 3]
    }

    fn check_len(what: &'static str, expected: usize, got: usize) -> Result<()> {
        if expected == got {
            Ok(())
        } else {
            Err(Error::LengthMismatch { what, expected, got })
        }
    }

    /// `out = A u`.
    pub fn apply_a(&self, u: &[f64], out: &mut [f64]) -> Result<()> {
        Self::check_len("u", self.n_vars(), u.len())?;
        Self::check_len("A u", self.n_rows(), out.len())?;
        self.apply_a_unchecked(u, out);
        Ok(())
    }

    /// `out = A^T w`.
    pub fn apply_at(&self, w: &[f64], out: &mut [f64]) -> Result<()> {
        Self::check_len("w", self.n_rows(), w.len())?;
        Self::check_len("A^T w", self.n_vars(), out.len())?;
        self.apply_at_unchecked(w, out);
        Ok(())
    }

    #[inline]
    pub(crate) fn apply_a_unchecked(&self, u: &[f64], out: &mut [f64]) {
        for (t, rows) in self.triples.iter().zip(out.chunks_exact_mut(4)) {
            let [i, j, k] = t.0;
            let (a, b, c) = (u[i], u[j], u[k]);
            rows[0] = a - b - c;
            rows[1] = -a + b - c;
            rows[2] = -a - b + c;
            rows[3] = a + b + c;
        }
    }

    #[inline]
    pub(crate) fn apply_at_unchecked(&self, w: &[f64], out: &mut [f64]) {
        out.iter_mut().for_each(|o| *o = 0.0);
        for (t, r) in self.triples.iter().zip(w.chunks_exact(4)) {
            let [i, j, k] = t.0;
            out[i] += r[0] - r[1] - r[2] + r[3];
            out[j] += -r[0] + r[1] - r[2] + r[3];
            out[k] += -r[0] - r[1] + r[2] + r[3];
        }
    }

    /// True iff `A u <= b` holds elementwise.
    pub fn satisfies(&self, u: &[f64]) -> Result<bool> {
        Self::check_len("u", self.n_vars(), u.len())?;
        let mut au = vec![0.0; self.n_rows()];
        self.apply_a_unchecked(u, &mut au);
        Ok(au.iter().enumerate().all(|(r, &v)| v <= self.b(r)))
    }

    /// Extends a codeword `x` by the auxiliary bits that make every triple
    /// even: each auxiliary is the parity of the chain prefix it closes.
    pub fn feasible_aux(&self, x: &[u8]) -> Result<Vec<u8>> {
        Self::check_len("codeword", self.n_orig, x.len())?;
        let mut u = vec![0u8; self.n_vars()];
        for (dst, &bit) in u.iter_mut().zip(x) {
            *dst = bit & 1;
        }
        for (t, &check) in self.triples.iter().zip(&self.triple_check) {
            let [i, j, k] = t.0;
            if k >= self.n_orig {
                u[k] = u[i] ^ u[j];
            } else if u[i] ^ u[j] ^ u[k] != 0 {
                return Err(Error::NotACodeword { check });
            }
        }
        Ok(u)
    }

    /// True iff every triple has even parity under binary `u`.
    pub fn triples_even(&self, u: &[u8]) -> Result<bool> {
        Self::check_len("u", self.n_vars(), u.len())?;
        Ok(self.triples.iter().all(|t| (u[t.0[0]] ^ u[t.0[1]] ^ u[t.0[2]]) & 1 == 0))
    }
}
