//! Penalty functions and the per-coordinate `u`-subproblem.
//!
//! The `u`-update of the decoder separates into independent scalar problems
//!
//! ```text
//! minimize_{u in [0, 1]}  h/2 u^2 + g(u) + raw * u
//! ```
//!
//! with `h = mu * e_i` and `raw = q_i + a_i^T (y + mu (z - b))`. The
//! piecewise solver is phrased in terms of `t = -raw`, i.e. it minimizes
//! `h/2 u^2 + g(u) - t u`.

use alloc::vec::Vec;

use crate::error::{Error, Result};

#[inline]
pub(crate) fn clamp01(x: f64) -> f64 {
    // f64::clamp would propagate NaN as well; spelled out so the branch
    // structure matches the gradient code.
    if x < 0.0 {
        0.0
    } else if x > 1.0 {
        1.0
    } else {
        x
    }
}

fn check_domain(u: f64) -> Result<()> {
    if (0.0..=1.0).contains(&u) {
        Ok(())
    } else {
        Err(Error::OutOfDomain { value: u })
    }
}

/// `g(u) = -alpha/2 (u - 0.5)^2`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct L2Penalty {
    alpha: f64,
}

impl L2Penalty {
    pub fn new(alpha: f64) -> Result<Self> {
        if alpha.is_finite() && alpha >= 0.0 {
            Ok(L2Penalty { alpha })
        } else {
            Err(Error::InvalidParams(alloc::format!("alpha must be finite and >= 0, got {alpha}")))
        }
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn eval(&self, u: f64) -> Result<f64> {
        check_domain(u)?;
        let d = u - 0.5;
        Ok(-0.5 * self.alpha * d * d)
    }

    pub fn derivative(&self, u: f64) -> Result<f64> {
        check_domain(u)?;
        Ok(-self.alpha * (u - 0.5))
    }

    /// Closed-form minimizer `Pi_[0,1]((raw + alpha/2) / (alpha - h))`.
    ///
    /// `raw = q_i + a_i^T (y + mu (z - b))`, `h = mu * e_i`. Requires
    /// `h > alpha` so the subproblem is strictly convex.
    pub fn solve(&self, raw: f64, h: f64) -> Result<f64> {
        if !(h > self.alpha) {
            return Err(Error::NonConvex { alpha: self.alpha, h });
        }
        Ok(clamp01((raw + 0.5 * self.alpha) / (self.alpha - h)))
    }
}

/// Which of the `2L` linear pieces of a [`PiecewiseLinearPenalty`] holds a
/// point. Pieces are numbered left to right, `0..2L`; piece `p < L` has slope
/// `phi_{p+1}` and piece `p >= L` has slope `-phi_{2L-p}`.
pub type PieceIndex = usize;

/// Relative tolerance under which two candidate objectives count as tied.
const TIE_RTOL: f64 = 1e-12;

/// Result of the piecewise `u`-subproblem.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PiecewiseSolution {
    pub u: f64,
    pub piece: PieceIndex,
    /// True when `u` is the unclamped stationary point `(t - slope) / h`
    /// of its piece, false when it sits on a breakpoint or on 0 or 1.
    pub interior: bool,
}

/// Symmetric piecewise-linear penalty with `2L` pieces and learnable slopes
/// `phi_1..phi_L`.
///
/// On `[0, 0.5]` the pieces start at the uniform breakpoints
/// `c_l = l / (2L)`, `l = 0..L-1`; the right half mirrors the left so that
/// `g(u) = g(1 - u)`. Biases are derived from continuity with `beta_1 = 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct PiecewiseLinearPenalty {
    slopes: Vec<f64>,
    breakpoints: Vec<f64>,
    biases: Vec<f64>,
}

/// Uniform breakpoints `c_0 = 0, ..., c_{L-1}` on `[0, 0.5)`.
pub fn uniform_breakpoints(l: usize) -> Vec<f64> {
    (0..l).map(|i| i as f64 / (2 * l) as f64).collect()
}

/// Biases `beta_1..beta_2L` that make the penalty continuous, anchored at
/// `beta_1 = 0`.
pub fn derive_biases(slopes: &[f64], breakpoints: &[f64]) -> Vec<f64> {
    let l = slopes.len();
    let mut beta = alloc::vec![0.0; 2 * l];
    for i in 1..l {
        // continuity at c_i between slopes phi_i and phi_{i+1}
        beta[i] = beta[i - 1] + (slopes[i - 1] - slopes[i]) * breakpoints[i];
    }
    for i in 0..l {
        // g(u) = g(1 - u) on the mirrored piece
        beta[2 * l - 1 - i] = beta[i] + slopes[i];
    }
    beta
}

impl PiecewiseLinearPenalty {
    /// Builds the penalty from positive, finite slopes `phi_1..phi_L`.
    pub fn new(slopes: Vec<f64>) -> Result<Self> {
        if slopes.is_empty() {
            return Err(Error::InvalidParams("piecewise penalty needs at least one slope".into()));
        }
        if let Some(bad) = slopes.iter().find(|s| !(s.is_finite() && **s > 0.0)) {
            return Err(Error::InvalidParams(alloc::format!("slopes must be finite and > 0, got {bad}")));
        }
        let breakpoints = uniform_breakpoints(slopes.len());
        let biases = derive_biases(&slopes, &breakpoints);
        Ok(PiecewiseLinearPenalty { slopes, breakpoints, biases })
    }

    /// Slopes that sample the derivative of the L2 penalty with coefficient
    /// `alpha` at the midpoint of each left piece.
    pub fn from_l2(alpha: f64, l: usize) -> Result<Self> {
        let width = 0.5 / l as f64;
        Self::new((0..l).map(|i| alpha * (0.5 - (i as f64 + 0.5) * width)).collect())
    }

    /// Number of slopes `L` (half the number of pieces).
    pub fn n_slopes(&self) -> usize {
        self.slopes.len()
    }

    pub fn slopes(&self) -> &[f64] {
        &self.slopes
    }

    pub fn breakpoints(&self) -> &[f64] {
        &self.breakpoints
    }

    pub fn biases(&self) -> &[f64] {
        &self.biases
    }

    /// Signed slope of piece `p`.
    #[inline]
    pub fn piece_slope(&self, p: PieceIndex) -> f64 {
        let l = self.slopes.len();
        if p < l {
            self.slopes[p]
        } else {
            -self.slopes[2 * l - 1 - p]
        }
    }

    /// Closed interval spanned by piece `p`.
    #[inline]
    pub fn piece_bounds(&self, p: PieceIndex) -> (f64, f64) {
        let l = self.slopes.len();
        let left_hi = |i: usize| if i + 1 < l { self.breakpoints[i + 1] } else { 0.5 };
        if p < l {
            (self.breakpoints[p], left_hi(p))
        } else {
            let i = 2 * l - 1 - p;
            (1.0 - left_hi(i), 1.0 - self.breakpoints[i])
        }
    }

    /// Piece containing `u`: `[c_{l-1}, c_l)` on the left, `[c_{L-1}, 0.5]`
    /// in the middle, and mirrored intervals on the right.
    pub fn piece_of(&self, u: f64) -> PieceIndex {
        let l = self.slopes.len();
        let left = |v: f64| ((v * (2 * l) as f64) as usize).min(l - 1);
        if u <= 0.5 {
            left(u)
        } else {
            2 * l - 1 - left(1.0 - u)
        }
    }

    #[inline]
    fn eval_on(&self, p: PieceIndex, u: f64) -> f64 {
        self.piece_slope(p) * u + self.biases[p]
    }

    pub fn eval(&self, u: f64) -> Result<f64> {
        check_domain(u)?;
        Ok(self.eval_on(self.piece_of(u), u))
    }

    /// Slope of the piece containing `u`.
    pub fn derivative(&self, u: f64) -> Result<f64> {
        check_domain(u)?;
        Ok(self.piece_slope(self.piece_of(u)))
    }

    /// Global minimizer of `h/2 u^2 + g(u) - t u` over `[0, 1]`.
    ///
    /// `t = q_i + a_i^T (mu (b - z) - y)`, the negative of the L2 solver's
    /// `raw`. Every piece's clamped stationary point is a candidate; the one
    /// with the lowest objective wins, ties (up to a relative `1e-12`) going to
    /// the larger `u`.
    pub fn solve(&self, t: f64, h: f64) -> Result<f64> {
        Ok(self.solve_detailed(t, h)?.u)
    }

    pub fn solve_detailed(&self, t: f64, h: f64) -> Result<PiecewiseSolution> {
        if !(h > 0.0) {
            return Err(Error::NonConvex { alpha: 0.0, h });
        }
        Ok(self.solve_unchecked(t, h))
    }

    #[inline]
    pub(crate) fn solve_unchecked(&self, t: f64, h: f64) -> PiecewiseSolution {
        let inv_h = 1.0 / h;
        // Mirror-image candidates tie exactly at t = h/2; rounding must not
        // decide between them.
        let tol = TIE_RTOL * (h + t.abs() + self.biases[self.biases.len() - 1].abs());
        let mut best = PiecewiseSolution { u: f64::NAN, piece: 0, interior: false };
        let mut best_obj = f64::INFINITY;
        for p in 0..2 * self.slopes.len() {
            let (lo, hi) = self.piece_bounds(p);
            let stationary = (t - self.piece_slope(p)) * inv_h;
            let (u, interior) = if stationary <= lo {
                (lo, false)
            } else if stationary >= hi {
                (hi, false)
            } else {
                (stationary, true)
            };
            let obj = 0.5 * h * u * u + self.eval_on(p, u) - t * u;
            if obj < best_obj - tol || (obj <= best_obj + tol && u > best.u) {
                best_obj = obj;
                best = PiecewiseSolution { u, piece: p, interior };
            }
        }
        if !best_obj.is_finite() {
            best.u = f64::NAN;
        }
        best
    }

    /// Threshold form of the minimizer.
    ///
    /// Walks the thresholds `c_{l-1} h + phi_l` and `c_l h + phi_l` of the
    /// half selected by `t < h/2` (the other half is handled through
    /// `u -> 1 - u`). Exact when each half of the penalty is convex, i.e. the
    /// slopes are non-decreasing towards the centre; for other slope orders
    /// use [`solve`](Self::solve).
    pub fn solve_thresholds(&self, t: f64, h: f64) -> Result<f64> {
        if !(h > 0.0) {
            return Err(Error::NonConvex { alpha: 0.0, h });
        }
        let left = |t: f64| {
            let l = self.slopes.len();
            for i in 0..l {
                let lo = self.breakpoints[i];
                let hi = if i + 1 < l { self.breakpoints[i + 1] } else { 0.5 };
                let phi = self.slopes[i];
                if t < lo * h + phi {
                    return lo;
                }
                if t < hi * h + phi {
                    return (t - phi) / h;
                }
            }
            0.5
        };
        Ok(if t < 0.5 * h { left(t) } else { 1.0 - left(h - t) })
    }
}

/// Either supported penalty.
#[derive(Debug, Clone, PartialEq)]
pub enum Penalty {
    L2(L2Penalty),
    Piecewise(PiecewiseLinearPenalty),
}

impl Penalty {
    pub fn eval(&self, u: f64) -> Result<f64> {
        match self {
            Penalty::L2(g) => g.eval(u),
            Penalty::Piecewise(g) => g.eval(u),
        }
    }

    pub fn derivative(&self, u: f64) -> Result<f64> {
        match self {
            Penalty::L2(g) => g.derivative(u),
            Penalty::Piecewise(g) => g.derivative(u),
        }
    }
}
