//! Gaussian elimination over GF(2) and systematic encoding from a
//! parity-check matrix.

use alloc::vec;
use alloc::vec::Vec;

use crate::code::ParityCheckMatrix;
use crate::error::{Error, Result};

type Row = Vec<u64>;

fn bit(row: &Row, c: usize) -> bool {
    (row[c / 64] >> (c % 64)) & 1 == 1
}

fn xor_into(dst: &mut Row, src: &Row) {
    for (d, s) in dst.iter_mut().zip(src) {
        *d ^= s;
    }
}

/// Reduced row-echelon form of `h`: the nonzero rows and their pivot columns.
fn rref(h: &ParityCheckMatrix) -> (Vec<Row>, Vec<usize>) {
    let n = h.n_vars();
    let words = n.div_ceil(64);
    let mut rows: Vec<Row> = h
        .rows()
        .iter()
        .map(|r| {
            let mut row = vec![0u64; words];
            for &i in r {
                row[i / 64] |= 1 << (i % 64);
            }
            row
        })
        .collect();
    let mut pivots = Vec::new();
    let mut rank = 0;
    for c in 0..n {
        let Some(p) = (rank..rows.len()).find(|&r| bit(&rows[r], c)) else {
            continue;
        };
        rows.swap(rank, p);
        let pivot = rows[rank].clone();
        for (r, row) in rows.iter_mut().enumerate() {
            if r != rank && bit(row, c) {
                xor_into(row, &pivot);
            }
        }
        pivots.push(c);
        rank += 1;
        if rank == rows.len() {
            break;
        }
    }
    rows.truncate(rank);
    (rows, pivots)
}

/// GF(2) rank of `h`.
pub fn rank(h: &ParityCheckMatrix) -> usize {
    rref(h).1.len()
}

/// Encoder mapping `k = N - rank(H)` message bits onto codewords.
///
/// Message bits occupy the non-pivot columns of the reduced form of `H`, in
/// increasing order; each pivot bit is the parity its reduced row imposes.
/// Codewords come out in the original coordinate order.
#[derive(Debug, Clone)]
pub struct SystematicEncoder {
    n: usize,
    info_positions: Vec<usize>,
    /// (pivot column, reduced row) pairs.
    parity_rows: Vec<(usize, Row)>,
}

impl SystematicEncoder {
    pub fn new(h: &ParityCheckMatrix) -> Self {
        let (rows, pivots) = rref(h);
        let mut is_pivot = vec![false; h.n_vars()];
        for &p in &pivots {
            is_pivot[p] = true;
        }
        SystematicEncoder {
            n: h.n_vars(),
            info_positions: (0..h.n_vars()).filter(|&c| !is_pivot[c]).collect(),
            parity_rows: pivots.into_iter().zip(rows).collect(),
        }
    }

    /// Like [`new`](Self::new) but rejects rank-deficient matrices, for which
    /// the rate is not `(N - M) / N`.
    pub fn full_rank(h: &ParityCheckMatrix) -> Result<Self> {
        let enc = Self::new(h);
        if enc.rank() < h.n_checks() {
            return Err(Error::RankDeficient { rank: enc.rank(), checks: h.n_checks() });
        }
        Ok(enc)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn k(&self) -> usize {
        self.info_positions.len()
    }

    pub fn rank(&self) -> usize {
        self.parity_rows.len()
    }

    pub fn info_positions(&self) -> &[usize] {
        &self.info_positions
    }

    pub fn encode(&self, message: &[u8]) -> Result<Vec<u8>> {
        if message.len() != self.k() {
            return Err(Error::LengthMismatch { what: "message", expected: self.k(), got: message.len() });
        }
        let mut x = vec![0u8; self.n];
        for (&pos, &m) in self.info_positions.iter().zip(message) {
            x[pos] = m & 1;
        }
        for (pivot, row) in &self.parity_rows {
            x[*pivot] = self.info_positions.iter().fold(0u8, |acc, &c| acc ^ (u8::from(bit(row, c)) & x[c]));
        }
        Ok(x)
    }
}
