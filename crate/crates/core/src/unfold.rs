//! The decoder unrolled into a K-stage network, its training loss and
//! gradients, and the training loop.
//!
//! The forward pass runs the very same stage routine as
//! [`admm::Decoder`](crate::admm::Decoder), recording the intermediates that
//! the reverse pass needs. Gradients can be computed analytically (reverse
//! mode through every stage) or by central finite differences; the latter is
//! slow but independent of the former and serves as its oracle.
//!
//! Non-differentiable points (the clamp to `[0, 1]`, `max(0, .)` and the
//! piece selection of the piecewise penalty) get a zero subgradient.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use rand::seq::SliceRandom;

use crate::admm::{hard_decision, run_stage, Buffers, DecodeTrace, DecoderParams, MuSchedule, StagePenalty};
use crate::cascade::CascadedSystem;
use crate::channel::ChannelSample;
use crate::error::{Error, Result};
use crate::exec::Executor;
use crate::rng::{derive_seed, stream_rng};

/// Lower bound kept on every `mu_k` after an optimizer step.
pub const MU_MIN: f64 = 1e-3;
/// Lower bound kept on every slope `phi_l` after an optimizer step.
pub const SLOPE_MIN: f64 = 1e-3;
/// `alpha` is kept below `ALPHA_MARGIN * 4 * min mu`.
pub const ALPHA_MARGIN: f64 = 0.999;

/// Which stages enter the loss.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum LayerMode {
    /// Only stage K.
    FinalStage,
    /// Average of the per-stage losses over all K stages.
    #[default]
    AllStagesMean,
}

impl LayerMode {
    pub fn tag(self) -> &'static str {
        match self {
            LayerMode::FinalStage => "final-stage",
            LayerMode::AllStagesMean => "all-stages-mean",
        }
    }

    pub fn from_tag(tag: &str) -> Option<Self> {
        match tag {
            "final-stage" => Some(LayerMode::FinalStage),
            "all-stages-mean" => Some(LayerMode::AllStagesMean),
            _ => None,
        }
    }
}

/// Per-stage loss `sigma |A u + z - b|^2 + (1 - sigma) |u[..N] - x|^2`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossConfig {
    pub sigma: f64,
    pub layer_mode: LayerMode,
}

impl LossConfig {
    pub fn new(sigma: f64, layer_mode: LayerMode) -> Result<Self> {
        if !(0.0..=1.0).contains(&sigma) {
            return Err(Error::InvalidConfig(format!("sigma must lie in [0, 1], got {sigma}")));
        }
        Ok(LossConfig { sigma, layer_mode })
    }

    /// Weight of stage `k` (0-based) out of `n_stages`.
    #[inline]
    fn stage_weight(&self, k: usize, n_stages: usize) -> f64 {
        match self.layer_mode {
            LayerMode::FinalStage => f64::from(u8::from(k + 1 == n_stages)),
            LayerMode::AllStagesMean => 1.0 / n_stages as f64,
        }
    }

    #[inline]
    fn stage_loss(&self, residual: f64, u: &[f64], x: &[u8]) -> f64 {
        let sup: f64 = u.iter().zip(x).map(|(&ui, &xi)| (ui - f64::from(xi)) * (ui - f64::from(xi))).sum();
        self.sigma * residual + (1.0 - self.sigma) * sup
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum GradMode {
    #[default]
    Analytic,
    CentralDifference,
}

impl GradMode {
    pub fn tag(self) -> &'static str {
        match self {
            GradMode::Analytic => "analytic-reverse",
            GradMode::CentralDifference => "central-finite-difference",
        }
    }

    pub fn from_tag(tag: &str) -> Option<Self> {
        match tag {
            "analytic-reverse" | "analytic" => Some(GradMode::Analytic),
            "central-finite-difference" | "fd" => Some(GradMode::CentralDifference),
            _ => None,
        }
    }
}

/// Loss over a batch of decode traces (as produced with `trace_wanted`).
pub fn loss(traces: &[DecodeTrace], labels: &[Vec<u8>], cfg: &LossConfig) -> Result<f64> {
    if traces.len() != labels.len() {
        return Err(Error::LengthMismatch { what: "labels", expected: traces.len(), got: labels.len() });
    }
    if traces.is_empty() {
        return Ok(0.0);
    }
    let mut total = 0.0;
    for (t, x) in traces.iter().zip(labels) {
        let k = t.stages.len();
        if k == 0 || t.residuals.len() != k {
            return Err(Error::InvalidConfig("trace has no stages".into()));
        }
        if cfg.layer_mode == LayerMode::AllStagesMean && t.stop_stage.is_some() {
            return Err(Error::InvalidConfig("all-stages loss needs traces without early stopping".into()));
        }
        for (s, st) in t.stages.iter().enumerate() {
            let w = cfg.stage_weight(s, k);
            if w != 0.0 {
                if st.u.len() < x.len() {
                    return Err(Error::LengthMismatch { what: "trace u", expected: x.len(), got: st.u.len() });
                }
                total += w * cfg.stage_loss(t.residuals[s], &st.u[..x.len()], x);
            }
        }
    }
    Ok(total / traces.len() as f64)
}

/// Recorded forward pass of one sample through the unrolled network.
#[derive(Debug, Clone)]
pub struct Tape {
    n_stages: usize,
    n_vars: usize,
    n_rows: usize,
    n_orig: usize,
    z0: Vec<f64>,
    /// Stage-major `[K][n_vars]`.
    raw: Vec<f64>,
    u: Vec<f64>,
    piece: Vec<u8>,
    /// Stage-major `[K][n_rows]`.
    au: Vec<f64>,
    z: Vec<f64>,
    y: Vec<f64>,
    residuals: Vec<f64>,
}

impl Tape {
    pub fn new(sys: &CascadedSystem, n_stages: usize) -> Self {
        let (nv, nr) = (sys.n_vars(), sys.n_rows());
        Tape {
            n_stages,
            n_vars: nv,
            n_rows: nr,
            n_orig: sys.n_orig(),
            z0: vec![0.0; nr],
            raw: vec![0.0; n_stages * nv],
            u: vec![0.0; n_stages * nv],
            piece: vec![0; n_stages * nv],
            au: vec![0.0; n_stages * nr],
            z: vec![0.0; n_stages * nr],
            y: vec![0.0; n_stages * nr],
            residuals: vec![0.0; n_stages],
        }
    }

    pub fn n_stages(&self) -> usize {
        self.n_stages
    }

    /// `u` after stage `k` (0-based).
    pub fn u(&self, k: usize) -> &[f64] {
        &self.u[k * self.n_vars..(k + 1) * self.n_vars]
    }

    pub fn z(&self, k: usize) -> &[f64] {
        &self.z[k * self.n_rows..(k + 1) * self.n_rows]
    }

    pub fn y(&self, k: usize) -> &[f64] {
        &self.y[k * self.n_rows..(k + 1) * self.n_rows]
    }

    pub fn residuals(&self) -> &[f64] {
        &self.residuals
    }

    /// Hard decision on the network output.
    pub fn hard_decision(&self) -> Vec<u8> {
        hard_decision(self.u(self.n_stages - 1), self.n_orig)
    }

    /// Loss of this sample against label `x`.
    pub fn loss(&self, x: &[u8], cfg: &LossConfig) -> f64 {
        (0..self.n_stages)
            .map(|k| {
                let w = cfg.stage_weight(k, self.n_stages);
                if w == 0.0 {
                    0.0
                } else {
                    w * cfg.stage_loss(self.residuals[k], &self.u(k)[..self.n_orig], x)
                }
            })
            .sum()
    }

    /// Hash of every branch taken (clamp side, `max(0, .)` activity, piece
    /// choice). Equal signatures at two parameter points mean the network is
    /// smooth along the segment joining them, up to branch flips in between.
    pub fn branch_signature(&self) -> u64 {
        let mut h: u64 = 0xcbf2_9ce4_8422_2325;
        let mut feed = |b: u8| {
            h ^= u64::from(b);
            h = h.wrapping_mul(0x0100_0000_01b3);
        };
        for (&u, &p) in self.u.iter().zip(&self.piece) {
            if p & 0x80 != 0 {
                feed(p);
            } else {
                // Pinned at a bound or a kink: the location is what matters.
                u.to_bits().to_le_bytes().into_iter().for_each(&mut feed);
            }
        }
        for &z in &self.z {
            feed(u8::from(z > 0.0));
        }
        h
    }
}

fn check_forward_params(p: &DecoderParams) -> Result<()> {
    let finite = p.alpha.is_finite()
        && p.slopes.iter().all(|s| s.is_finite())
        && p.mu.values().iter().all(|m| m.is_finite() && *m > 0.0);
    if !finite {
        return Err(Error::InvalidParams("parameters must be finite with mu > 0".into()));
    }
    if let MuSchedule::PerStage(m) = &p.mu {
        if m.len() != p.n_stages {
            return Err(Error::InvalidParams(format!("{} mu values for {} stages", m.len(), p.n_stages)));
        }
    }
    Ok(())
}

/// Runs the unrolled network on `llr`, recording into `tape`. Always runs
/// all K stages (no early stopping). Parameter constraints other than
/// finiteness and `mu > 0` are not enforced here, so nearby infeasible
/// points can be probed by finite differences.
pub(crate) fn forward_into(
    sys: &CascadedSystem,
    params: &DecoderParams,
    llr: &[f64],
    buf: &mut Buffers,
    tape: &mut Tape,
) -> Result<()> {
    check_forward_params(params)?;
    if llr.len() != sys.n_orig() {
        return Err(Error::LengthMismatch { what: "llr", expected: sys.n_orig(), got: llr.len() });
    }
    if tape.n_stages != params.n_stages || tape.n_vars != sys.n_vars() {
        *tape = Tape::new(sys, params.n_stages);
    }
    let pen = StagePenalty::from_params(params)?;
    let l2 = params.variant.uses_l2();
    buf.reset(sys);
    tape.z0.copy_from_slice(&buf.z);
    let (nv, nr) = (sys.n_vars(), sys.n_rows());
    for k in 0..params.n_stages {
        let res = run_stage(sys, llr, &pen, params.mu.at(k), buf, &mut ());
        if !res.is_finite() {
            return Err(Error::NumericalFailure { stage: k + 1 });
        }
        tape.residuals[k] = res;
        tape.raw[k * nv..(k + 1) * nv].copy_from_slice(&buf.raw);
        tape.u[k * nv..(k + 1) * nv].copy_from_slice(&buf.u);
        if l2 {
            for (p, &u) in tape.piece[k * nv..(k + 1) * nv].iter_mut().zip(&buf.u) {
                *p = if u > 0.0 && u < 1.0 { 0x80 } else { 0 };
            }
        } else {
            tape.piece[k * nv..(k + 1) * nv].copy_from_slice(&buf.piece);
        }
        tape.au[k * nr..(k + 1) * nr].copy_from_slice(&buf.au);
        tape.z[k * nr..(k + 1) * nr].copy_from_slice(&buf.z);
        tape.y[k * nr..(k + 1) * nr].copy_from_slice(&buf.y);
    }
    Ok(())
}

/// Allocating form of [`forward_into`].
pub fn forward(sys: &CascadedSystem, params: &DecoderParams, llr: &[f64]) -> Result<Tape> {
    let mut buf = Buffers::new(sys);
    let mut tape = Tape::new(sys, params.n_stages);
    forward_into(sys, params, llr, &mut buf, &mut tape)?;
    Ok(tape)
}

/// Scratch vectors of the reverse pass.
#[derive(Debug, Clone)]
struct Adjoints {
    ybar: Vec<f64>,
    zbar: Vec<f64>,
    ybar_in: Vec<f64>,
    rbar: Vec<f64>,
    ubar: Vec<f64>,
    rawbar: Vec<f64>,
    wbar: Vec<f64>,
    mubar: Vec<f64>,
}

impl Adjoints {
    fn new(sys: &CascadedSystem, n_stages: usize) -> Self {
        let (nv, nr) = (sys.n_vars(), sys.n_rows());
        Adjoints {
            ybar: vec![0.0; nr],
            zbar: vec![0.0; nr],
            ybar_in: vec![0.0; nr],
            rbar: vec![0.0; nr],
            ubar: vec![0.0; nv],
            rawbar: vec![0.0; nv],
            wbar: vec![0.0; nr],
            mubar: vec![0.0; n_stages],
        }
    }
}

/// Reverse pass: gradient of `tape.loss(x, cfg)` with respect to
/// `params.theta()`, accumulated into `grad`.
fn backward(
    sys: &CascadedSystem,
    params: &DecoderParams,
    tape: &Tape,
    x: &[u8],
    cfg: &LossConfig,
    adj: &mut Adjoints,
    grad: &mut [f64],
) {
    let k_total = params.n_stages;
    let (nv, nr, n) = (sys.n_vars(), sys.n_rows(), sys.n_orig());
    let e = sys.e();
    let l2 = params.variant.uses_l2();
    let n_slopes = params.slopes.len();
    let alpha = params.alpha;
    let mut alpha_bar = 0.0;
    let mut slope_bar = vec![0.0; n_slopes];

    adj.ybar.iter_mut().for_each(|v| *v = 0.0);
    adj.zbar.iter_mut().for_each(|v| *v = 0.0);
    adj.mubar.iter_mut().for_each(|v| *v = 0.0);

    for k in (0..k_total).rev() {
        let mu = params.mu.at(k);
        let inv_mu = 1.0 / mu;
        let u = &tape.u[k * nv..(k + 1) * nv];
        let raw = &tape.raw[k * nv..(k + 1) * nv];
        let piece = &tape.piece[k * nv..(k + 1) * nv];
        let au = &tape.au[k * nr..(k + 1) * nr];
        let z = &tape.z[k * nr..(k + 1) * nr];
        let (y_in, z_in): (&[f64], &[f64]) = if k == 0 {
            (&[], &tape.z0)
        } else {
            (&tape.y[(k - 1) * nr..k * nr], &tape.z[(k - 1) * nr..k * nr])
        };
        let y_in_at = |r: usize| if k == 0 { 0.0 } else { y_in[r] };
        let c = cfg.stage_weight(k, k_total);
        let mut mubar = 0.0;

        // Loss terms, then y_k = y_in + mu r and r = A u + z_k - b.
        adj.ubar.iter_mut().for_each(|v| *v = 0.0);
        let wr = 2.0 * cfg.sigma * c;
        let wu = 2.0 * (1.0 - cfg.sigma) * c;
        if wu != 0.0 {
            for i in 0..n {
                adj.ubar[i] = wu * (u[i] - f64::from(x[i]));
            }
        }
        for r in 0..nr {
            let res = au[r] + z[r] - sys.b(r);
            let rb = wr * res + mu * adj.ybar[r];
            mubar += adj.ybar[r] * res;
            adj.ybar_in[r] = adj.ybar[r];
            // z_k = max(0, b - A u - y_in / mu)
            let zb = adj.zbar[r] + rb;
            let mut aub = rb;
            if z[r] > 0.0 {
                aub -= zb;
                adj.ybar_in[r] -= zb * inv_mu;
                mubar += zb * y_in_at(r) * inv_mu * inv_mu;
            }
            adj.rbar[r] = aub;
        }
        // A u
        let mut atb = core::mem::take(&mut adj.rawbar);
        sys.apply_at_unchecked(&adj.rbar, &mut atb);
        for (ub, a) in adj.ubar.iter_mut().zip(&atb) {
            *ub += a;
        }
        adj.rawbar = atb;

        // u-step
        if l2 {
            let half = 0.5 * alpha;
            for i in 0..nv {
                let ub = adj.ubar[i];
                let ui = u[i];
                if ub != 0.0 && ui > 0.0 && ui < 1.0 {
                    let eta = 1.0 / (alpha - mu * e[i]);
                    let num = raw[i] + half;
                    adj.rawbar[i] = ub * eta;
                    alpha_bar += ub * (0.5 * eta - num * eta * eta);
                    mubar += ub * num * eta * eta * e[i];
                } else {
                    adj.rawbar[i] = 0.0;
                }
            }
        } else {
            for i in 0..nv {
                let ub = adj.ubar[i];
                let p = piece[i];
                if ub != 0.0 && p & 0x80 != 0 {
                    let h = mu * e[i];
                    let inv_h = 1.0 / h;
                    // u = (t - s) / h, t = -raw
                    adj.rawbar[i] = -ub * inv_h;
                    mubar -= ub * u[i] * inv_h * e[i];
                    let pi = (p & 0x7f) as usize;
                    if pi < n_slopes {
                        slope_bar[pi] -= ub * inv_h;
                    } else {
                        slope_bar[2 * n_slopes - 1 - pi] += ub * inv_h;
                    }
                } else {
                    adj.rawbar[i] = 0.0;
                }
            }
        }

        // raw = q + A^T w, w = y_in + mu (z_in - b)
        sys.apply_a_unchecked(&adj.rawbar, &mut adj.wbar);
        for r in 0..nr {
            let wb = adj.wbar[r];
            adj.ybar_in[r] += wb;
            adj.zbar[r] = mu * wb;
            mubar += wb * (z_in[r] - sys.b(r));
        }
        core::mem::swap(&mut adj.ybar, &mut adj.ybar_in);
        adj.mubar[k] = mubar;
    }

    let head = if l2 {
        grad[0] += alpha_bar;
        1
    } else {
        for (g, s) in grad.iter_mut().zip(&slope_bar) {
            *g += s;
        }
        n_slopes
    };
    match &params.mu {
        MuSchedule::Shared(_) => grad[head] += adj.mubar.iter().sum::<f64>(),
        MuSchedule::PerStage(_) => {
            for (g, m) in grad[head..].iter_mut().zip(&adj.mubar) {
                *g += m;
            }
        }
    }
}

/// Gradient of the batch loss with respect to the learnable parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradient {
    pub loss: f64,
    pub values: Vec<f64>,
    pub names: Vec<String>,
}

/// Samples per work item; fixed so reductions do not depend on the executor.
const CHUNK: usize = 8;

fn per_sample<E, T, F>(exec: &E, sys: &CascadedSystem, params: &DecoderParams, batch: &[ChannelSample], f: F) -> Vec<T>
where
    E: Executor,
    T: Send,
    F: Fn(&ChannelSample, &mut Buffers, &mut Tape, &mut Adjoints) -> T + Sync + Send,
{
    let n_chunks = batch.len().div_ceil(CHUNK);
    exec.map(n_chunks, |c| {
        let mut buf = Buffers::new(sys);
        let mut tape = Tape::new(sys, params.n_stages);
        let mut adj = Adjoints::new(sys, params.n_stages);
        batch[c * CHUNK..((c + 1) * CHUNK).min(batch.len())]
            .iter()
            .map(|s| f(s, &mut buf, &mut tape, &mut adj))
            .collect::<Vec<T>>()
    })
    .into_iter()
    .flatten()
    .collect()
}

/// Mean loss of the unrolled network over `batch`.
pub fn batch_loss<E: Executor>(
    exec: &E,
    sys: &CascadedSystem,
    params: &DecoderParams,
    batch: &[ChannelSample],
    cfg: &LossConfig,
) -> Result<f64> {
    if batch.is_empty() {
        return Ok(0.0);
    }
    if params.n_stages == 0 {
        return Ok(0.0);
    }
    let losses = per_sample(exec, sys, params, batch, |s, buf, tape, _| {
        forward_into(sys, params, &s.v, buf, tape).map(|_| tape.loss(&s.x, cfg))
    });
    let mut total = 0.0;
    for l in losses {
        total += l?;
    }
    Ok(total / batch.len() as f64)
}

/// Combined branch signature of the network over `batch`.
pub fn batch_branch_signature<E: Executor>(
    exec: &E,
    sys: &CascadedSystem,
    params: &DecoderParams,
    batch: &[ChannelSample],
) -> Result<u64> {
    let sigs = per_sample(exec, sys, params, batch, |s, buf, tape, _| {
        forward_into(sys, params, &s.v, buf, tape).map(|_| tape.branch_signature())
    });
    let mut h = 0u64;
    for s in sigs {
        h = crate::rng::mix64(h ^ s?);
    }
    Ok(h)
}

/// Batch loss and its gradient with respect to `params.theta()`.
///
/// Central differences use the step `1e-4 * max(1, |theta_j|)` per parameter.
pub fn grad<E: Executor>(
    exec: &E,
    sys: &CascadedSystem,
    params: &DecoderParams,
    batch: &[ChannelSample],
    cfg: &LossConfig,
    mode: GradMode,
) -> Result<Gradient> {
    let names = params.theta_names();
    let dim = names.len();
    if params.n_stages == 0 || batch.is_empty() {
        return Ok(Gradient { loss: 0.0, values: vec![0.0; dim], names });
    }
    let (loss, values) = match mode {
        GradMode::Analytic => {
            let parts = per_sample(exec, sys, params, batch, |s, buf, tape, adj| {
                forward_into(sys, params, &s.v, buf, tape)?;
                let mut g = vec![0.0; dim];
                backward(sys, params, tape, &s.x, cfg, adj, &mut g);
                Ok::<_, Error>((tape.loss(&s.x, cfg), g))
            });
            let mut loss = 0.0;
            let mut values = vec![0.0; dim];
            for p in parts {
                let (l, g) = p?;
                loss += l;
                for (a, b) in values.iter_mut().zip(&g) {
                    *a += b;
                }
            }
            let scale = 1.0 / batch.len() as f64;
            values.iter_mut().for_each(|v| *v *= scale);
            (loss * scale, values)
        }
        GradMode::CentralDifference => {
            let theta = params.theta();
            let mut values = vec![0.0; dim];
            let mut probe = params.clone();
            for j in 0..dim {
                let step = 1e-4 * theta[j].abs().max(1.0);
                let mut t = theta.clone();
                t[j] = theta[j] + step;
                probe.set_theta(&t);
                let plus = batch_loss(exec, sys, &probe, batch, cfg)?;
                t[j] = theta[j] - step;
                probe.set_theta(&t);
                let minus = batch_loss(exec, sys, &probe, batch, cfg)?;
                values[j] = (plus - minus) / (2.0 * step);
            }
            (batch_loss(exec, sys, params, batch, cfg)?, values)
        }
    };
    if let Some(j) = values.iter().position(|v| !v.is_finite()) {
        return Err(Error::NonFiniteGradient { param: names[j].clone() });
    }
    Ok(Gradient { loss, values, names })
}

/// Adam moment estimates for a flat parameter vector.
#[derive(Debug, Clone, PartialEq)]
pub struct Adam {
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    m: Vec<f64>,
    v: Vec<f64>,
    t: i32,
}

impl Adam {
    pub fn new(dim: usize, beta1: f64, beta2: f64, eps: f64) -> Self {
        Adam { beta1, beta2, eps, m: vec![0.0; dim], v: vec![0.0; dim], t: 0 }
    }

    pub fn step(&mut self, theta: &mut [f64], grad: &[f64], lr: f64) {
        self.t += 1;
        let c1 = 1.0 - libm::pow(self.beta1, f64::from(self.t));
        let c2 = 1.0 - libm::pow(self.beta2, f64::from(self.t));
        for ((th, &g), (m, v)) in theta.iter_mut().zip(grad).zip(self.m.iter_mut().zip(self.v.iter_mut())) {
            *m = self.beta1 * *m + (1.0 - self.beta1) * g;
            *v = self.beta2 * *v + (1.0 - self.beta2) * g * g;
            let m_hat = *m / c1;
            let v_hat = *v / c2;
            *th -= lr * m_hat / (libm::sqrt(v_hat) + self.eps);
        }
    }
}

/// Moves parameters back into the region where the decoder is well defined:
/// `mu_k >= MU_MIN`, `phi_l >= SLOPE_MIN` and `0 <= alpha < 4 min mu`.
pub fn project(params: &mut DecoderParams) {
    for m in params.mu.values_mut() {
        if !(*m >= MU_MIN) {
            *m = MU_MIN;
        }
    }
    for s in &mut params.slopes {
        if !(*s >= SLOPE_MIN) {
            *s = SLOPE_MIN;
        }
    }
    if params.variant.uses_l2() {
        let hi = ALPHA_MARGIN * 4.0 * params.mu.min();
        params.alpha = if params.alpha.is_nan() { 0.0 } else { params.alpha.clamp(0.0, hi) };
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainConfig {
    pub lr0: f64,
    /// Multiplier applied to the learning rate after every epoch.
    pub lr_decay: f64,
    pub batch_size: usize,
    pub max_epochs: usize,
    /// Epochs without a validation improvement before stopping.
    pub patience: usize,
    pub grad_mode: GradMode,
    pub seed: u64,
    pub adam_beta1: f64,
    pub adam_beta2: f64,
    pub adam_eps: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            lr0: 1e-3,
            lr_decay: 0.5,
            batch_size: 100,
            max_epochs: 20,
            patience: 3,
            grad_mode: GradMode::Analytic,
            seed: 1,
            adam_beta1: 0.9,
            adam_beta2: 0.999,
            adam_eps: 1e-8,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidConfig(m));
        if !(self.lr0 > 0.0 && self.lr0.is_finite()) {
            return bad(format!("lr0 must be > 0, got {}", self.lr0));
        }
        if !(self.lr_decay > 0.0 && self.lr_decay <= 1.0) {
            return bad(format!("lr_decay must lie in (0, 1], got {}", self.lr_decay));
        }
        if self.batch_size == 0 {
            return bad("batch size must be positive".into());
        }
        Ok(())
    }
}

/// One line of the training log; epoch 0 is the initial point.
#[derive(Debug, Clone, PartialEq)]
pub struct EpochLog {
    pub epoch: usize,
    pub lr: f64,
    pub train_loss: f64,
    pub val_loss: f64,
    pub theta: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainOutcome {
    /// Parameters with the lowest validation loss seen (possibly the initial ones).
    pub params: DecoderParams,
    pub initial_val_loss: f64,
    pub best_val_loss: f64,
    pub best_epoch: usize,
    pub log: Vec<EpochLog>,
}

/// Trains the learnable parameters of `init` with Adam on `train`, keeping
/// the parameters with the best loss on `val`.
///
/// The learning rate is `lr0 * lr_decay^(epoch - 1)` during epoch `epoch`.
/// Training stops after `max_epochs` or after `patience` epochs without a
/// validation improvement. `on_epoch` sees every log line as it is produced.
#[allow(clippy::too_many_arguments)]
pub fn train<E: Executor>(
    exec: &E,
    sys: &CascadedSystem,
    init: &DecoderParams,
    train: &[ChannelSample],
    val: &[ChannelSample],
    tcfg: &TrainConfig,
    lcfg: &LossConfig,
    on_epoch: &mut dyn FnMut(&EpochLog),
) -> Result<TrainOutcome> {
    tcfg.validate()?;
    let mut params = init.clone();
    params.residual_eps = 0.0;
    params.validate()?;
    if train.is_empty() || val.is_empty() {
        return Err(Error::InvalidConfig("training and validation sets must be non-empty".into()));
    }

    let initial_val = batch_loss(exec, sys, &params, val, lcfg)?;
    if !initial_val.is_finite() {
        return Err(Error::Divergence { epoch: 0 });
    }
    let first = EpochLog {
        epoch: 0,
        lr: 0.0,
        train_loss: f64::NAN,
        val_loss: initial_val,
        theta: params.theta(),
    };
    on_epoch(&first);
    let mut log = vec![first];
    let mut best = (initial_val, params.clone(), 0usize);
    let mut adam = Adam::new(params.theta().len(), tcfg.adam_beta1, tcfg.adam_beta2, tcfg.adam_eps);
    let mut order: Vec<usize> = (0..train.len()).collect();
    let mut stale = 0;
    let mut lr = tcfg.lr0;
    let mut batch = Vec::with_capacity(tcfg.batch_size);

    for epoch in 1..=tcfg.max_epochs {
        order.shuffle(&mut stream_rng(derive_seed(tcfg.seed, 0x5348_5546), epoch as u64));
        let mut train_loss = 0.0;
        for idx in order.chunks(tcfg.batch_size) {
            batch.clear();
            batch.extend(idx.iter().map(|&i| train[i].clone()));
            let g = grad(exec, sys, &params, &batch, lcfg, tcfg.grad_mode)?;
            train_loss += g.loss * idx.len() as f64;
            let mut theta = params.theta();
            adam.step(&mut theta, &g.values, lr);
            params.set_theta(&theta);
            project(&mut params);
        }
        train_loss /= train.len() as f64;
        let val_loss = batch_loss(exec, sys, &params, val, lcfg).unwrap_or(f64::NAN);
        let entry = EpochLog { epoch, lr, train_loss, val_loss, theta: params.theta() };
        on_epoch(&entry);
        log.push(entry);
        if !val_loss.is_finite() {
            return Err(Error::Divergence { epoch });
        }
        if val_loss < best.0 {
            best = (val_loss, params.clone(), epoch);
            stale = 0;
        } else {
            stale += 1;
            if stale >= tcfg.patience {
                break;
            }
        }
        lr *= tcfg.lr_decay;
    }

    Ok(TrainOutcome { params: best.1, initial_val_loss: initial_val, best_val_loss: best.0, best_epoch: best.2, log })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::admm::decode;
    use crate::channel::{make_samples, CodewordMode, SnrConvention};
    use crate::code::ParityCheckMatrix;
    use crate::exec::Sequential;

    fn hamming() -> ParityCheckMatrix {
        ParityCheckMatrix::from_rows(7, vec![vec![0, 2, 4, 6], vec![1, 2, 5, 6], vec![3, 4, 5, 6]]).unwrap()
    }

    fn rel_err(a: &[f64], b: &[f64]) -> f64 {
        let num: f64 = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt();
        let den: f64 = b.iter().map(|x| x * x).sum::<f64>().sqrt();
        num / den.max(1e-12)
    }

    #[test]
    fn trace_loss_matches_tape_loss() {
        let h = hamming();
        let sys = CascadedSystem::build(&h);
        let p = DecoderParams::ladn(1.0, 1.2, 6);
        let samples = make_samples(&Sequential, &h, 5, 1.0, SnrConvention::EbN0, CodewordMode::RandomMessage, 3).unwrap();
        for mode in [LayerMode::FinalStage, LayerMode::AllStagesMean] {
            let cfg = LossConfig::new(0.3, mode).unwrap();
            let traces: Vec<DecodeTrace> =
                samples.iter().map(|s| decode(&sys, &s.v, &p, true).unwrap().trace.unwrap()).collect();
            let labels: Vec<Vec<u8>> = samples.iter().map(|s| s.x.clone()).collect();
            let a = loss(&traces, &labels, &cfg).unwrap();
            let b = batch_loss(&Sequential, &sys, &p, &samples, &cfg).unwrap();
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn loss_edge_cases() {
        let h = hamming();
        let sys = CascadedSystem::build(&h);
        let p = DecoderParams::ladn(1.0, 1.2, 80);
        let out = decode(&sys, &[30.0; 7], &p, true).unwrap();
        let t = out.trace.unwrap();
        let cfg = LossConfig::new(0.3, LayerMode::FinalStage).unwrap();
        assert!(loss(&[t.clone()], &[vec![0; 7]], &cfg).unwrap() < 1e-8);
        // sigma = 1 ignores labels.
        let pure = LossConfig::new(1.0, LayerMode::FinalStage).unwrap();
        let a = loss(&[t.clone()], &[vec![0; 7]], &pure).unwrap();
        let b = loss(&[t.clone()], &[vec![1; 7]], &pure).unwrap();
        assert_eq!(a, b);
        assert!(loss(&[t], &[], &cfg).is_err());
        assert!(LossConfig::new(1.5, LayerMode::FinalStage).is_err());
    }

    #[test]
    fn zero_stages_zero_gradient() {
        let h = hamming();
        let sys = CascadedSystem::build(&h);
        let mut p = DecoderParams::ladn(1.0, 1.2, 1);
        p.n_stages = 0;
        let s = make_samples(&Sequential, &h, 3, 1.0, SnrConvention::EbN0, CodewordMode::AllZero, 1).unwrap();
        let cfg = LossConfig::new(0.3, LayerMode::AllStagesMean).unwrap();
        let g = grad(&Sequential, &sys, &p, &s, &cfg, GradMode::Analytic).unwrap();
        assert_eq!(g.values, vec![0.0, 0.0]);
    }

    fn check_variant(params: DecoderParams, mode: LayerMode) {
        let h = hamming();
        let sys = CascadedSystem::build(&h);
        let cfg = LossConfig::new(0.3, mode).unwrap();
        let mut accepted = 0;
        for seed in 0..40u64 {
            let s = make_samples(&Sequential, &h, 3, 1.0, SnrConvention::EbN0, CodewordMode::RandomMessage, seed).unwrap();
            // Only compare where all probe points take the same branches.
            let sig = batch_branch_signature(&Sequential, &sys, &params, &s).unwrap();
            let theta = params.theta();
            let smooth = (0..theta.len()).all(|j| {
                [1.0, -1.0].iter().all(|sgn| {
                    let mut t = theta.clone();
                    t[j] += sgn * 1e-4 * theta[j].abs().max(1.0);
                    let mut q = params.clone();
                    q.set_theta(&t);
                    batch_branch_signature(&Sequential, &sys, &q, &s).unwrap() == sig
                })
            });
            if !smooth {
                continue;
            }
            let a = grad(&Sequential, &sys, &params, &s, &cfg, GradMode::Analytic).unwrap();
            let f = grad(&Sequential, &sys, &params, &s, &cfg, GradMode::CentralDifference).unwrap();
            assert!((a.loss - f.loss).abs() < 1e-12);
            let e = rel_err(&a.values, &f.values);
            assert!(e < 1e-4, "seed {seed}: analytic {:?} vs fd {:?}", a.values, f.values);
            accepted += 1;
        }
        assert!(accepted >= 10, "only {accepted} smooth draws");
    }

    #[test]
    fn gradient_ladn() {
        check_variant(DecoderParams::ladn(1.0, 1.2, 8), LayerMode::AllStagesMean);
        check_variant(DecoderParams::ladn(0.7, 0.9, 5), LayerMode::FinalStage);
    }

    #[test]
    fn gradient_ladn_i() {
        let mut p = DecoderParams::ladn_i(1.0, 1.2, 6);
        p.mu = MuSchedule::PerStage(vec![1.2, 0.9, 1.5, 1.1, 1.3, 0.8]);
        check_variant(p, LayerMode::AllStagesMean);
    }

    #[test]
    fn gradient_ladn_p() {
        let p = DecoderParams::ladn_p(vec![0.45, 0.3, 0.28, 0.12, 0.05], 1.2, 6);
        check_variant(p, LayerMode::AllStagesMean);
    }

    #[test]
    fn projection_restores_invariants() {
        let mut p = DecoderParams::ladn_i(10.0, 1.0, 3);
        p.mu = MuSchedule::PerStage(vec![-1.0, 0.5, 2.0]);
        project(&mut p);
        p.validate().unwrap();
        let mut q = DecoderParams::ladn_p(vec![-0.1, 0.2], 1.0, 2);
        project(&mut q);
        q.validate().unwrap();
    }

    #[test]
    fn adam_matches_hand_computation() {
        let mut adam = Adam::new(1, 0.9, 0.999, 1e-8);
        let mut th = [1.0];
        adam.step(&mut th, &[0.5], 0.1);
        // First step moves by lr * sign(g) up to eps.
        assert!((th[0] - 0.9).abs() < 1e-7);
        let first = th[0];
        adam.step(&mut th, &[-0.5], 0.1);
        let m = 0.9 * 0.05 + 0.1 * -0.5;
        let v = 0.999 * 0.00025 + 0.001 * 0.25;
        let step = 0.1 * (m / (1.0 - 0.81)) / ((v / (1.0 - 0.999f64.powi(2))).sqrt() + 1e-8);
        assert!((th[0] - (first - step)).abs() < 1e-12);
    }

    #[test]
    fn training_improves_validation_loss() {
        let h = hamming();
        let sys = CascadedSystem::build(&h);
        let tr = make_samples(&Sequential, &h, 400, 1.0, SnrConvention::EbN0, CodewordMode::AllZero, 1).unwrap();
        let va = make_samples(&Sequential, &h, 200, 1.0, SnrConvention::EbN0, CodewordMode::AllZero, 2).unwrap();
        let cfg = LossConfig::new(0.3, LayerMode::AllStagesMean).unwrap();
        let tcfg = TrainConfig { lr0: 0.05, lr_decay: 0.7, batch_size: 20, max_epochs: 5, ..Default::default() };
        let init = DecoderParams::ladn(1.0, 1.2, 10);
        let mut lines = 0;
        let out = train(&Sequential, &sys, &init, &tr, &va, &tcfg, &cfg, &mut |_| lines += 1).unwrap();
        assert!(out.best_val_loss < out.initial_val_loss);
        assert_ne!(out.params.theta(), init.theta());
        assert_eq!(lines, out.log.len());
        out.params.validate().unwrap();
        let again = train(&Sequential, &sys, &init, &tr, &va, &tcfg, &cfg, &mut |_| {}).unwrap();
        assert_eq!(again.params, out.params);
    }
}
