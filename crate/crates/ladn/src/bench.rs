//! Monte-Carlo block-error-rate estimation.
//!
//! Frames are decoded in parallel rounds but counted strictly in frame order,
//! and the run stops at the exact frame where the error budget is reached.
//! Frame `i` at a given SNR always sees stream `i` of a seed derived from the
//! run seed and the SNR, so results do not depend on the number of workers.

use std::time::Instant;

use ladn_core::channel::{Channel, CodewordMode, SnrConvention};
use ladn_core::exec::Executor;
use ladn_core::rng::derive_seed;
use ladn_core::{CascadedSystem, Decoder, DecoderParams, ParityCheckMatrix};

use crate::error::{Error, Result};

/// Two-sided 95% normal quantile.
const Z95: f64 = 1.959_963_984_540_054;
/// One-sided 95% normal quantile.
const Z95_ONE_SIDED: f64 = 1.644_853_626_951_472_2;

/// Frames per chunk handed to a worker.
const CHUNK: usize = 32;
/// Frames decoded before the stopping rule is re-checked.
const ROUND: usize = 32 * CHUNK;

#[derive(Debug, Clone, PartialEq)]
pub struct BlerPoint {
    pub decoder: String,
    pub snr_db: f64,
    pub frames: u64,
    pub errors: u64,
    pub bler: f64,
    pub seconds: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BenchConfig {
    pub min_errors: u64,
    pub max_frames: u64,
    pub codeword_mode: CodewordMode,
    pub convention: SnrConvention,
    pub seed: u64,
    /// Overrides the parameters' early-stop threshold when set.
    pub residual_eps: Option<f64>,
}

impl Default for BenchConfig {
    fn default() -> Self {
        BenchConfig {
            min_errors: 100,
            max_frames: 1_000_000,
            codeword_mode: CodewordMode::AllZero,
            convention: SnrConvention::EbN0,
            seed: 1,
            residual_eps: Some(ladn_core::admm::DEFAULT_RESIDUAL_EPS),
        }
    }
}

impl BenchConfig {
    pub fn validate(&self) -> Result<()> {
        if self.min_errors == 0 {
            return Err(Error::Config("min_errors must be at least 1".into()));
        }
        if self.max_frames == 0 {
            return Err(Error::Config("max_frames must be at least 1".into()));
        }
        if let Some(eps) = self.residual_eps {
            if !(eps.is_finite() && eps >= 0.0) {
                return Err(Error::Config(format!("residual_eps must be >= 0, got {eps}")));
            }
        }
        Ok(())
    }
}

/// BLER of one decoder at each SNR in `snrs`.
pub fn run_bler<E: Executor>(
    exec: &E,
    h: &ParityCheckMatrix,
    params: &DecoderParams,
    tag: &str,
    snrs: &[f64],
    cfg: &BenchConfig,
) -> Result<Vec<BlerPoint>> {
    cfg.validate()?;
    let mut params = params.clone();
    if let Some(eps) = cfg.residual_eps {
        params.residual_eps = eps;
    }
    params.validate()?;
    let sys = CascadedSystem::build(h);
    let mut out = Vec::with_capacity(snrs.len());
    for &snr in snrs {
        let channel = Channel::new(h, snr, cfg.convention, cfg.codeword_mode)?;
        let seed = derive_seed(cfg.seed, snr.to_bits());
        let start = Instant::now();
        let (mut frames, mut errors) = (0u64, 0u64);
        'rounds: while frames < cfg.max_frames {
            let round = (cfg.max_frames - frames).min(ROUND as u64) as usize;
            let base = frames;
            let n_chunks = round.div_ceil(CHUNK);
            let flags = exec.map(n_chunks, |c| -> ladn_core::Result<Vec<bool>> {
                let mut dec = Decoder::new(&sys, &params)?;
                (c * CHUNK..((c + 1) * CHUNK).min(round))
                    .map(|i| {
                        let s = channel.sample(seed, base + i as u64);
                        Ok(dec.decode(&s.v, false)?.bits != s.x)
                    })
                    .collect()
            });
            for chunk in flags {
                for failed in chunk? {
                    frames += 1;
                    errors += u64::from(failed);
                    if errors >= cfg.min_errors {
                        break 'rounds;
                    }
                }
            }
        }
        out.push(BlerPoint {
            decoder: tag.to_string(),
            snr_db: snr,
            frames,
            errors,
            bler: errors as f64 / frames as f64,
            seconds: start.elapsed().as_secs_f64(),
        });
    }
    Ok(out)
}

pub const CSV_COLUMNS: &str = "decoder,snr_db,frames,errors,bler,seconds";

/// CSV with `# key=value` metadata lines before the column header.
pub fn to_csv(points: &[BlerPoint], meta: &[(String, String)]) -> String {
    let mut out = String::new();
    for (k, v) in meta {
        out.push_str(&format!("# {k}={v}\n"));
    }
    out.push_str(CSV_COLUMNS);
    out.push('\n');
    for p in points {
        out.push_str(&format!("{},{},{},{},{},{:.3}\n", p.decoder, p.snr_db, p.frames, p.errors, p.bler, p.seconds));
    }
    out
}

/// Inverse of [`to_csv`] (metadata lines are skipped).
pub fn from_csv(text: &str, origin: &str) -> Result<Vec<BlerPoint>> {
    let mut rows = text.lines().enumerate().filter(|(_, l)| !l.starts_with('#') && !l.trim().is_empty());
    match rows.next() {
        Some((_, l)) if l.trim() == CSV_COLUMNS => {}
        _ => return Err(Error::format(origin, format!("expected header \"{CSV_COLUMNS}\""))),
    }
    rows.map(|(i, l)| {
        let err = || Error::format(origin, format!("line {}: malformed row", i + 1));
        let f: Vec<&str> = l.split(',').collect();
        if f.len() != 6 {
            return Err(err());
        }
        Ok(BlerPoint {
            decoder: f[0].to_string(),
            snr_db: f[1].parse().map_err(|_| err())?,
            frames: f[2].parse().map_err(|_| err())?,
            errors: f[3].parse().map_err(|_| err())?,
            bler: f[4].parse().map_err(|_| err())?,
            seconds: f[5].parse().map_err(|_| err())?,
        })
    })
    .collect()
}

/// 95% Wilson score interval for `k` successes in `n` trials. At `k = 0`
/// (or `k = n`) the open side is a one-sided 95% bound.
pub fn wilson(k: u64, n: u64) -> (f64, f64) {
    if n == 0 {
        return (0.0, 1.0);
    }
    let bound = |z: f64| {
        let (nf, p) = (n as f64, k as f64 / n as f64);
        let z2 = z * z;
        let centre = (p + z2 / (2.0 * nf)) / (1.0 + z2 / nf);
        let half = z / (1.0 + z2 / nf) * (p * (1.0 - p) / nf + z2 / (4.0 * nf * nf)).sqrt();
        ((centre - half).max(0.0), (centre + half).min(1.0))
    };
    if k == 0 {
        (0.0, bound(Z95_ONE_SIDED).1)
    } else if k == n {
        (bound(Z95_ONE_SIDED).0, 1.0)
    } else {
        bound(Z95)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Comparison {
    pub snr_db: f64,
    pub bler_a: f64,
    pub bler_b: f64,
    /// `bler_a / bler_b`; 0 when `a` saw no errors, 1 when neither did.
    pub ratio: f64,
    pub interval_a: (f64, f64),
    pub interval_b: (f64, f64),
    /// The intervals are disjoint or touch.
    pub significant: bool,
    /// A zero error count made the ratio or an interval one-sided.
    pub degenerate: bool,
}

/// Point-by-point comparison of two runs over the same SNR grid.
pub fn compare(a: &[BlerPoint], b: &[BlerPoint]) -> Result<Vec<Comparison>> {
    if a.len() != b.len() || a.iter().zip(b).any(|(p, q)| p.snr_db != q.snr_db) {
        return Err(Error::Config("compared runs must share the SNR grid".into()));
    }
    Ok(a.iter()
        .zip(b)
        .map(|(p, q)| {
            let ia = wilson(p.errors, p.frames);
            let ib = wilson(q.errors, q.frames);
            let ratio = match (p.errors, q.errors) {
                (0, 0) => 1.0,
                (0, _) => 0.0,
                (_, 0) => f64::INFINITY,
                _ => p.bler / q.bler,
            };
            Comparison {
                snr_db: p.snr_db,
                bler_a: p.bler,
                bler_b: q.bler,
                ratio,
                interval_a: ia,
                interval_b: ib,
                significant: ia.1 <= ib.0 || ib.1 <= ia.0,
                degenerate: p.errors == 0 || q.errors == 0,
            }
        })
        .collect())
}

pub fn comparison_csv(tag_a: &str, tag_b: &str, rows: &[Comparison]) -> String {
    let mut out = String::from("a,b,snr_db,bler_a,bler_b,ratio,a_lo,a_hi,b_lo,b_hi,significant,degenerate\n");
    for r in rows {
        out.push_str(&format!(
            "{tag_a},{tag_b},{},{},{},{},{},{},{},{},{},{}\n",
            r.snr_db, r.bler_a, r.bler_b, r.ratio, r.interval_a.0, r.interval_a.1, r.interval_b.0, r.interval_b.1,
            r.significant, r.degenerate
        ));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exec::Pool;

    fn hamming() -> ParityCheckMatrix {
        ParityCheckMatrix::from_rows(7, vec![vec![0, 2, 4, 6], vec![1, 2, 5, 6], vec![3, 4, 5, 6]]).unwrap()
    }

    fn point(errors: u64, frames: u64, snr: f64) -> BlerPoint {
        BlerPoint { decoder: "d".into(), snr_db: snr, frames, errors, bler: errors as f64 / frames as f64, seconds: 0.0 }
    }

    #[test]
    fn noiseless_regime_has_no_errors() {
        let cfg = BenchConfig { max_frames: 500, ..Default::default() };
        let p = DecoderParams::fixed_l2(1.0, 1.2, 50);
        let pts = run_bler(&Pool::new(2).unwrap(), &hamming(), &p, "fixed-l2", &[40.0], &cfg).unwrap();
        assert_eq!((pts[0].frames, pts[0].errors, pts[0].bler), (500, 0, 0.0));
    }

    #[test]
    fn worker_count_does_not_matter() {
        let cfg = BenchConfig {
            min_errors: 40,
            max_frames: 5000,
            codeword_mode: CodewordMode::RandomMessage,
            ..Default::default()
        };
        let p = DecoderParams::fixed_l2(1.0, 1.2, 30);
        let strip = |v: Vec<BlerPoint>| v.into_iter().map(|p| (p.frames, p.errors)).collect::<Vec<_>>();
        let a = run_bler(&Pool::new(1).unwrap(), &hamming(), &p, "x", &[0.0, 3.0], &cfg).unwrap();
        let b = run_bler(&Pool::new(4).unwrap(), &hamming(), &p, "x", &[0.0, 3.0], &cfg).unwrap();
        let c = run_bler(&ladn_core::exec::Sequential, &hamming(), &p, "x", &[0.0, 3.0], &cfg).unwrap();
        assert_eq!(strip(a.clone()), strip(b));
        assert_eq!(strip(a.clone()), strip(c));
        assert_eq!(a[0].errors, 40);
        assert!(a[0].bler >= a[1].bler);
    }

    #[test]
    fn csv_round_trip() {
        let pts = vec![point(100, 1000, 2.0), point(7, 70_000, 4.0)];
        let text = to_csv(&pts, &[("seed".into(), "1".into())]);
        assert!(text.starts_with("# seed=1\ndecoder,snr_db,frames,errors,bler,seconds\n"));
        let back = from_csv(&text, "mem").unwrap();
        assert_eq!(back.iter().map(|p| (p.frames, p.errors)).collect::<Vec<_>>(), vec![(1000, 100), (70_000, 7)]);
        assert!(from_csv("a,b\n", "mem").is_err());
    }

    #[test]
    fn wilson_interval_values() {
        // Reference values from the closed form at z = 1.96.
        let (lo, hi) = wilson(10, 100);
        assert!((lo - 0.055_229).abs() < 1e-5 && (hi - 0.174_366).abs() < 1e-5, "{lo} {hi}");
        let (lo0, hi0) = wilson(0, 100);
        assert_eq!(lo0, 0.0);
        assert!((hi0 - 0.026_343).abs() < 1e-5, "{hi0}");
        assert_eq!(wilson(100, 100).1, 1.0);
    }

    #[test]
    fn comparison_cases() {
        let same = vec![point(100, 1000, 1.0), point(100, 5000, 2.0)];
        for r in compare(&same, &same).unwrap() {
            assert_eq!(r.ratio, 1.0);
            assert!(!r.significant && !r.degenerate);
        }
        let r = compare(&[point(100, 10_000, 1.0)], &[point(200, 10_000, 1.0)]).unwrap();
        assert!((r[0].ratio - 0.5).abs() < 1e-15);
        assert!(r[0].significant);
        let z = compare(&[point(0, 1000, 1.0)], &[point(50, 1000, 1.0)]).unwrap();
        assert_eq!(z[0].ratio, 0.0);
        assert!(z[0].degenerate);
        assert!(compare(&same, &same[..1]).is_err());
    }
}
