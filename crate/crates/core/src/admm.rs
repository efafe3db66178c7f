//! The ADMM-penalized decoder and its unfolded variants.
//!
//! Each stage `k` (penalty parameter `mu_k`) performs
//!
//! ```text
//! u <- argmin_{u in [0,1]} q^T u + sum_i g(u_i) + y^T (A u + z - b) + mu_k/2 |A u + z - b|^2
//! z <- max(0, b - A u - y / mu_k)
//! y <- y + mu_k (A u + z - b)
//! ```
//!
//! starting from `u = 0.5`, `y = 0`, `z = max(0, b - A u)`. The `u`-step is
//! separable because `A^T A = diag(e)`. The hard decision thresholds the
//! first `N` entries of `u` at 0.5 (ties map to 1).
//!
//! The same stage routine drives plain decoding and the unrolled network in
//! [`crate::unfold`], so trained parameters decode identically in both.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use crate::cascade::CascadedSystem;
use crate::error::{Error, Result};
use crate::penalty::{clamp01, PiecewiseLinearPenalty};

/// Default early-stop threshold on `|A u + z - b|^2` when early stopping is on.
pub const DEFAULT_RESIDUAL_EPS: f64 = 1e-5;

/// Which decoder family a parameter set belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Variant {
    /// Plain ADMM L2 decoder with hand-set `alpha`, `mu`.
    FixedL2,
    /// Unfolded L2 decoder with learned `alpha`, `mu`.
    Ladn,
    /// Unfolded L2 decoder with learned `alpha` and one `mu_k` per stage.
    LadnI,
    /// Unfolded decoder with a learned piecewise-linear penalty.
    LadnP,
}

impl Variant {
    pub fn tag(self) -> &'static str {
        match self {
            Variant::FixedL2 => "fixed-l2",
            Variant::Ladn => "ladn",
            Variant::LadnI => "ladn-i",
            Variant::LadnP => "ladn-p",
        }
    }

    pub fn from_tag(tag: &str) -> Option<Self> {
        match tag {
            "fixed-l2" => Some(Variant::FixedL2),
            "ladn" => Some(Variant::Ladn),
            "ladn-i" => Some(Variant::LadnI),
            "ladn-p" => Some(Variant::LadnP),
            _ => None,
        }
    }

    pub fn uses_l2(self) -> bool {
        !matches!(self, Variant::LadnP)
    }
}

/// Penalty parameter: one value shared by all stages or one per stage.
#[derive(Debug, Clone, PartialEq)]
pub enum MuSchedule {
    Shared(f64),
    PerStage(Vec<f64>),
}

impl MuSchedule {
    #[inline]
    pub fn at(&self, stage: usize) -> f64 {
        match self {
            MuSchedule::Shared(mu) => *mu,
            MuSchedule::PerStage(mus) => mus[stage],
        }
    }

    pub fn values(&self) -> &[f64] {
        match self {
            MuSchedule::Shared(mu) => core::slice::from_ref(mu),
            MuSchedule::PerStage(mus) => mus,
        }
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        match self {
            MuSchedule::Shared(mu) => core::slice::from_mut(mu),
            MuSchedule::PerStage(mus) => mus,
        }
    }

    pub fn min(&self) -> f64 {
        self.values().iter().copied().fold(f64::INFINITY, f64::min)
    }
}

/// Fixed or learnable decoder parameters plus iteration control.
#[derive(Debug, Clone, PartialEq)]
pub struct DecoderParams {
    pub variant: Variant,
    /// L2 penalty coefficient; ignored by [`Variant::LadnP`].
    pub alpha: f64,
    /// Piecewise penalty slopes `phi_1..phi_L`; only used by [`Variant::LadnP`].
    pub slopes: Vec<f64>,
    pub mu: MuSchedule,
    /// Number of stages (iterations) K.
    pub n_stages: usize,
    /// Stop once `|A u + z - b|^2 <= residual_eps`; 0 disables early stopping.
    pub residual_eps: f64,
}

impl DecoderParams {
    pub fn fixed_l2(alpha: f64, mu: f64, n_stages: usize) -> Self {
        DecoderParams {
            variant: Variant::FixedL2,
            alpha,
            slopes: Vec::new(),
            mu: MuSchedule::Shared(mu),
            n_stages,
            residual_eps: 0.0,
        }
    }

    pub fn ladn(alpha: f64, mu: f64, n_stages: usize) -> Self {
        DecoderParams { variant: Variant::Ladn, ..Self::fixed_l2(alpha, mu, n_stages) }
    }

    /// LADN-I with every `mu_k` initialised to `mu`.
    pub fn ladn_i(alpha: f64, mu: f64, n_stages: usize) -> Self {
        DecoderParams {
            variant: Variant::LadnI,
            mu: MuSchedule::PerStage(vec![mu; n_stages]),
            ..Self::fixed_l2(alpha, mu, n_stages)
        }
    }

    pub fn ladn_p(slopes: Vec<f64>, mu: f64, n_stages: usize) -> Self {
        DecoderParams { variant: Variant::LadnP, alpha: 0.0, slopes, ..Self::fixed_l2(0.0, mu, n_stages) }
    }

    pub fn with_residual_eps(mut self, eps: f64) -> Self {
        self.residual_eps = eps;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidParams(msg));
        if self.n_stages == 0 {
            return bad("at least one stage is required".into());
        }
        match (&self.mu, self.variant) {
            (MuSchedule::PerStage(m), _) if m.len() != self.n_stages => {
                return bad(format!("{} per-stage mu values for {} stages", m.len(), self.n_stages));
            }
            (MuSchedule::PerStage(_), Variant::FixedL2 | Variant::Ladn) => {
                return bad(format!("{} uses a single shared mu", self.variant.tag()));
            }
            (MuSchedule::Shared(_), Variant::LadnI) => {
                return bad("ladn-i needs one mu per stage".into());
            }
            _ => {}
        }
        if let Some(m) = self.mu.values().iter().find(|m| !(m.is_finite() && **m > 0.0)) {
            return bad(format!("mu must be finite and > 0, got {m}"));
        }
        if self.variant.uses_l2() {
            let limit = 4.0 * self.mu.min();
            if !(self.alpha.is_finite() && self.alpha >= 0.0 && self.alpha < limit) {
                return bad(format!("alpha must lie in [0, 4 min mu) = [0, {limit}), got {}", self.alpha));
            }
        } else if self.slopes.is_empty() {
            return bad("ladn-p needs at least one slope".into());
        } else if let Some(s) = self.slopes.iter().find(|s| !(s.is_finite() && **s > 0.0)) {
            return bad(format!("slopes must be finite and > 0, got {s}"));
        }
        if !(self.residual_eps.is_finite() && self.residual_eps >= 0.0) {
            return bad(format!("residual_eps must be finite and >= 0, got {}", self.residual_eps));
        }
        Ok(())
    }

    /// Learnable parameters as a flat vector: `[alpha, mu..]` for the L2
    /// variants, `[phi_1..phi_L, mu..]` for LADN-P.
    pub fn theta(&self) -> Vec<f64> {
        let mut t = Vec::new();
        if self.variant.uses_l2() {
            t.push(self.alpha);
        } else {
            t.extend_from_slice(&self.slopes);
        }
        t.extend_from_slice(self.mu.values());
        t
    }

    pub fn set_theta(&mut self, theta: &[f64]) {
        let head = if self.variant.uses_l2() {
            self.alpha = theta[0];
            1
        } else {
            let l = self.slopes.len();
            self.slopes.copy_from_slice(&theta[..l]);
            l
        };
        self.mu.values_mut().copy_from_slice(&theta[head..]);
    }

    /// Human-readable names matching [`theta`](Self::theta).
    pub fn theta_names(&self) -> Vec<String> {
        let mut names = Vec::new();
        if self.variant.uses_l2() {
            names.push("alpha".into());
        } else {
            names.extend((1..=self.slopes.len()).map(|l| format!("phi_{l}")));
        }
        match &self.mu {
            MuSchedule::Shared(_) => names.push("mu".into()),
            MuSchedule::PerStage(m) => names.extend((1..=m.len()).map(|k| format!("mu_{k}"))),
        }
        names
    }
}

/// Per-stage state `(u, z, y)` of a decode.
#[derive(Debug, Clone, PartialEq)]
pub struct StageState {
    pub u: Vec<f64>,
    pub z: Vec<f64>,
    pub y: Vec<f64>,
}

/// Stage outputs and residuals `|A u + z - b|^2` of a decode, stage 1 first.
#[derive(Debug, Clone, PartialEq)]
pub struct DecodeTrace {
    pub stages: Vec<StageState>,
    pub residuals: Vec<f64>,
    /// Stage (1-based) at which early stopping fired.
    pub stop_stage: Option<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DecodeOutput {
    /// Hard decisions on the N code bits.
    pub bits: Vec<u8>,
    /// Final relaxed solution over all `N + n_aux` variables.
    pub u: Vec<f64>,
    /// `|A u + z - b|^2` after the last stage run.
    pub residual: f64,
    pub stages_run: usize,
    pub trace: Option<DecodeTrace>,
}

/// `0` where `u_i < 0.5`, `1` otherwise, over the first `n` entries.
pub fn hard_decision(u: &[f64], n: usize) -> Vec<u8> {
    u[..n].iter().map(|&x| u8::from(!(x < 0.5))).collect()
}

/// `eta_i = 1 / (alpha - mu e_i)`.
pub fn eta_vector(sys: &CascadedSystem, alpha: f64, mu: f64) -> Result<Vec<f64>> {
    sys.e()
        .iter()
        .map(|&e| {
            let den = alpha - mu * e;
            if den == 0.0 || !den.is_finite() {
                Err(Error::InvalidParams(format!("alpha = mu * e_i = {alpha}: eta undefined")))
            } else {
                Ok(1.0 / den)
            }
        })
        .collect()
}

/// Receives arithmetic-operation counts from the decoder's inner loops.
pub trait OpCounter {
    #[inline(always)]
    fn mul(&mut self, _n: usize) {}
    #[inline(always)]
    fn add(&mut self, _n: usize) {}
    #[inline(always)]
    fn div(&mut self, _n: usize) {}
}

impl OpCounter for () {}

/// Tally of real multiplications, additions and divisions.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct OpCounts {
    pub mul: u64,
    pub add: u64,
    pub div: u64,
}

impl OpCounter for OpCounts {
    fn mul(&mut self, n: usize) {
        self.mul += n as u64;
    }
    fn add(&mut self, n: usize) {
        self.add += n as u64;
    }
    fn div(&mut self, n: usize) {
        self.div += n as u64;
    }
}

/// The penalty as seen by the `u`-step.
#[derive(Debug, Clone)]
pub(crate) enum StagePenalty {
    L2 { alpha: f64 },
    Piecewise(PiecewiseLinearPenalty),
}

impl StagePenalty {
    pub(crate) fn from_params(p: &DecoderParams) -> Result<Self> {
        Ok(if p.variant.uses_l2() {
            StagePenalty::L2 { alpha: p.alpha }
        } else {
            StagePenalty::Piecewise(PiecewiseLinearPenalty::new(p.slopes.clone())?)
        })
    }
}

/// Working vectors of one decode.
#[derive(Debug, Clone)]
pub(crate) struct Buffers {
    pub u: Vec<f64>,
    pub au: Vec<f64>,
    pub z: Vec<f64>,
    pub y: Vec<f64>,
    pub w: Vec<f64>,
    pub raw: Vec<f64>,
    pub piece: Vec<u8>,
    eta: Vec<f64>,
    /// `(alpha, mu)` that `eta` was computed for.
    eta_key: (f64, f64),
}

impl Buffers {
    pub(crate) fn new(sys: &CascadedSystem) -> Self {
        let (n, r) = (sys.n_vars(), sys.n_rows());
        Buffers {
            u: vec![0.0; n],
            au: vec![0.0; r],
            z: vec![0.0; r],
            y: vec![0.0; r],
            w: vec![0.0; r],
            raw: vec![0.0; n],
            piece: vec![0; n],
            eta: vec![0.0; n],
            eta_key: (f64::NAN, f64::NAN),
        }
    }

    /// `u = 0.5`, `y = 0`, `z = max(0, b - A u)`.
    pub(crate) fn reset(&mut self, sys: &CascadedSystem) {
        self.u.iter_mut().for_each(|x| *x = 0.5);
        sys.apply_a_unchecked(&self.u, &mut self.au);
        for (r, (z, &au)) in self.z.iter_mut().zip(&self.au).enumerate() {
            *z = (sys.b(r) - au).max(0.0);
        }
        self.y.iter_mut().for_each(|x| *x = 0.0);
    }
}

/// One ADMM stage. Returns the residual `|A u + z - b|^2` of the new state.
///
/// `raw` receives `q + A^T (y + mu (z - b))` and, for the piecewise penalty,
/// `piece` the selected piece (with bit 7 set for interior solutions); the
/// unrolled network differentiates through them.
#[inline]
pub(crate) fn run_stage<C: OpCounter>(
    sys: &CascadedSystem,
    llr: &[f64],
    pen: &StagePenalty,
    mu: f64,
    buf: &mut Buffers,
    counter: &mut C,
) -> f64 {
    let n = sys.n_orig();
    let rows = sys.n_rows();
    let n_u = sys.n_vars();

    // w = y + mu (z - b)
    for (r, ((w, &y), &z)) in buf.w.iter_mut().zip(&buf.y).zip(&buf.z).enumerate() {
        *w = y + mu * (z - sys.b(r));
    }
    counter.mul(rows);
    counter.add(2 * rows);

    // raw = q + A^T w
    sys.apply_at_unchecked(&buf.w, &mut buf.raw);
    counter.add(4 * rows);
    for (r, &v) in buf.raw[..n].iter_mut().zip(llr) {
        *r += v;
    }
    counter.add(n);

    match pen {
        StagePenalty::L2 { alpha } => {
            if buf.eta_key != (*alpha, mu) {
                for (eta, &e) in buf.eta.iter_mut().zip(sys.e()) {
                    *eta = 1.0 / (alpha - mu * e);
                }
                buf.eta_key = (*alpha, mu);
                counter.mul(n_u);
                counter.add(n_u);
                counter.div(n_u);
            }
            let half = 0.5 * alpha;
            for ((u, &raw), &eta) in buf.u.iter_mut().zip(&buf.raw).zip(&buf.eta) {
                *u = clamp01((raw + half) * eta);
            }
            counter.mul(n_u + 1);
            counter.add(n_u);
        }
        StagePenalty::Piecewise(g) => {
            for (i, ((u, &raw), &e)) in buf.u.iter_mut().zip(&buf.raw).zip(sys.e()).enumerate() {
                let sol = g.solve_unchecked(-raw, mu * e);
                *u = sol.u;
                buf.piece[i] = sol.piece as u8 | if sol.interior { 0x80 } else { 0 };
            }
            // 2L candidates, each: stationary point, objective (5 mul).
            let per = 2 * g.n_slopes();
            counter.mul(n_u * (1 + 6 * per));
            counter.add(n_u * 5 * per);
            counter.div(n_u);
        }
    }

    sys.apply_a_unchecked(&buf.u, &mut buf.au);
    counter.add(8 * rows / 4);

    let inv_mu = 1.0 / mu;
    counter.div(1);
    let mut residual = 0.0;
    for (r, ((z, y), &au)) in buf.z.iter_mut().zip(buf.y.iter_mut()).zip(&buf.au).enumerate() {
        let b = sys.b(r);
        *z = (b - au - *y * inv_mu).max(0.0);
        let res = au + *z - b;
        *y += mu * res;
        residual += res * res;
    }
    counter.mul(3 * rows);
    counter.add(6 * rows);
    residual
}

/// Reusable decoder bound to one system and parameter set.
#[derive(Debug, Clone)]
pub struct Decoder<'a> {
    sys: &'a CascadedSystem,
    params: &'a DecoderParams,
    pen: StagePenalty,
    buf: Buffers,
}

impl<'a> Decoder<'a> {
    pub fn new(sys: &'a CascadedSystem, params: &'a DecoderParams) -> Result<Self> {
        params.validate()?;
        Ok(Decoder { sys, params, pen: StagePenalty::from_params(params)?, buf: Buffers::new(sys) })
    }

    pub fn decode(&mut self, llr: &[f64], trace_wanted: bool) -> Result<DecodeOutput> {
        self.decode_counted(llr, trace_wanted, &mut ())
    }

    /// [`decode`](Self::decode) reporting its arithmetic to `counter`.
    pub fn decode_counted<C: OpCounter>(
        &mut self,
        llr: &[f64],
        trace_wanted: bool,
        counter: &mut C,
    ) -> Result<DecodeOutput> {
        let sys = self.sys;
        if llr.len() != sys.n_orig() {
            return Err(Error::LengthMismatch { what: "llr", expected: sys.n_orig(), got: llr.len() });
        }
        if llr.iter().any(|v| !v.is_finite()) {
            return Err(Error::NumericalFailure { stage: 0 });
        }
        let p = self.params;
        self.buf.reset(sys);
        let mut trace = trace_wanted.then(|| DecodeTrace {
            stages: Vec::with_capacity(p.n_stages),
            residuals: Vec::with_capacity(p.n_stages),
            stop_stage: None,
        });
        let mut residual = 0.0;
        let mut stages_run = 0;
        for k in 0..p.n_stages {
            residual = run_stage(sys, llr, &self.pen, p.mu.at(k), &mut self.buf, counter);
            stages_run = k + 1;
            if !residual.is_finite() {
                return Err(Error::NumericalFailure { stage: stages_run });
            }
            let stop = p.residual_eps > 0.0 && residual <= p.residual_eps;
            if let Some(t) = trace.as_mut() {
                t.stages.push(StageState { u: self.buf.u.clone(), z: self.buf.z.clone(), y: self.buf.y.clone() });
                t.residuals.push(residual);
                if stop {
                    t.stop_stage = Some(stages_run);
                }
            }
            if stop {
                break;
            }
        }
        Ok(DecodeOutput {
            bits: hard_decision(&self.buf.u, sys.n_orig()),
            u: self.buf.u.clone(),
            residual,
            stages_run,
            trace,
        })
    }
}

/// Decodes one LLR vector (positive values favour bit 0).
pub fn decode(
    sys: &CascadedSystem,
    llr: &[f64],
    params: &DecoderParams,
    trace_wanted: bool,
) -> Result<DecodeOutput> {
    Decoder::new(sys, params)?.decode(llr, trace_wanted)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::code::ParityCheckMatrix;

    fn single() -> CascadedSystem {
        CascadedSystem::build(&ParityCheckMatrix::from_rows(3, vec![vec![0, 1, 2]]).unwrap())
    }

    fn hamming() -> CascadedSystem {
        let h = ParityCheckMatrix::from_rows(7, vec![vec![0, 2, 4, 6], vec![1, 2, 5, 6], vec![3, 4, 5, 6]]).unwrap();
        CascadedSystem::build(&h)
    }

    #[test]
    fn hard_decision_threshold() {
        assert_eq!(hard_decision(&[0.49], 1), vec![0]);
        assert_eq!(hard_decision(&[0.5], 1), vec![1]);
        assert_eq!(hard_decision(&[0.1, 0.9, 0.2], 2), vec![0, 1]);
    }

    #[test]
    fn eta_entries() {
        let sys = single();
        let eta = eta_vector(&sys, 1.0, 1.2).unwrap();
        assert!((eta[0] - 1.0 / (1.0 - 4.8)).abs() < 1e-15);
        assert!((eta[0] + 0.263_157_894_7).abs() < 1e-9);
        assert_eq!(eta_vector(&sys, 0.0, 1.0).unwrap(), vec![-0.25; 3]);
        assert!(eta_vector(&sys, 4.0, 1.0).is_err());
        assert!(eta_vector(&hamming(), 3.9, 1.0).unwrap().iter().all(|&x| x < 0.0));
    }

    #[test]
    fn erased_input_stays_at_centre() {
        let sys = hamming();
        let p = DecoderParams::fixed_l2(0.0, 1.0, 1);
        let out = decode(&sys, &[0.0; 7], &p, true).unwrap();
        assert!(out.u.iter().all(|&u| u == 0.5));
        assert_eq!(out.bits, vec![1; 7]);
    }

    #[test]
    fn strong_llrs_decode_to_zero() {
        let sys = hamming();
        let p = DecoderParams::fixed_l2(1.0, 1.2, 50);
        let out = decode(&sys, &[20.0; 7], &p, true).unwrap();
        assert_eq!(out.bits, vec![0; 7]);
        assert!(out.residual <= 1e-6);
        let t = out.trace.unwrap();
        assert_eq!(t.stages.len(), 50);
        for s in &t.stages {
            assert!(s.z.iter().all(|&z| z >= 0.0));
            assert!(s.u.iter().all(|&u| (0.0..=1.0).contains(&u)));
        }
    }

    #[test]
    fn early_stop_fires() {
        let sys = hamming();
        let p = DecoderParams::fixed_l2(1.0, 1.2, 200).with_residual_eps(DEFAULT_RESIDUAL_EPS);
        let out = decode(&sys, &[5.0, -3.0, 4.0, 6.0, 2.0, 3.0, 4.0], &p, true).unwrap();
        let t = out.trace.unwrap();
        assert_eq!(t.stop_stage, Some(out.stages_run));
        assert!(out.stages_run < 200);
        assert!(out.residual <= DEFAULT_RESIDUAL_EPS);
    }

    #[test]
    fn piecewise_variant_decodes() {
        let sys = hamming();
        let p = DecoderParams::ladn_p(PiecewiseLinearPenalty::from_l2(1.0, 5).unwrap().slopes().to_vec(), 1.2, 60);
        let out = decode(&sys, &[3.0, 2.5, -0.4, 2.0, 1.5, 3.0, 2.2], &p, false).unwrap();
        assert_eq!(out.bits, vec![0; 7]);
    }

    #[test]
    fn parameter_validation() {
        assert!(DecoderParams::fixed_l2(4.8, 1.2, 5).validate().is_err());
        assert!(DecoderParams::fixed_l2(1.0, 0.0, 5).validate().is_err());
        assert!(DecoderParams::fixed_l2(1.0, 1.2, 0).validate().is_err());
        let mut p = DecoderParams::ladn_i(1.0, 1.2, 4);
        p.validate().unwrap();
        p.mu = MuSchedule::PerStage(vec![1.2; 3]);
        assert!(p.validate().is_err());
        assert!(DecoderParams::ladn_p(vec![0.1, -0.2], 1.0, 3).validate().is_err());
        assert!(decode(&single(), &[1.0, f64::NAN, 1.0], &DecoderParams::ladn(1.0, 1.2, 3), false).is_err());
    }

    #[test]
    fn theta_round_trip() {
        let mut p = DecoderParams::ladn_i(1.0, 1.2, 3);
        assert_eq!(p.theta(), vec![1.0, 1.2, 1.2, 1.2]);
        assert_eq!(p.theta_names(), vec!["alpha", "mu_1", "mu_2", "mu_3"]);
        p.set_theta(&[0.5, 1.0, 2.0, 3.0]);
        assert_eq!(p.mu, MuSchedule::PerStage(vec![1.0, 2.0, 3.0]));
        let mut q = DecoderParams::ladn_p(vec![0.3, 0.2], 1.1, 3);
        assert_eq!(q.theta_names(), vec!["phi_1", "phi_2", "mu"]);
        q.set_theta(&[0.4, 0.1, 0.9]);
        assert_eq!((q.slopes.clone(), q.mu.clone()), (vec![0.4, 0.1], MuSchedule::Shared(0.9)));
    }

    #[test]
    fn counts_scale_with_system() {
        let sys = hamming();
        let p = DecoderParams::fixed_l2(1.0, 1.2, 2);
        let mut c = OpCounts::default();
        Decoder::new(&sys, &p).unwrap().decode_counted(&[1.0; 7], false, &mut c).unwrap();
        assert!(c.mul > 0 && c.div > 0);
    }
}
