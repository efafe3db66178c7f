//! BPSK over AWGN: labelled `(codeword, LLR)` samples.
//!
//! Bit `0` is sent as `+1` and bit `1` as `-1`. With noise variance
//! `sigma^2` the log-likelihood ratio `log p(y|0) / p(y|1)` is `2 y / sigma^2`.
//!
//! SNR values are Eb/N0 by default, so the noise variance accounts for the
//! code rate: `sigma^2 = 1 / (2 R 10^(snr/10))`. Es/N0 drops the rate.

use alloc::vec::Vec;

use rand::Rng;
use rand_distr::StandardNormal;

use crate::code::ParityCheckMatrix;
use crate::error::{Error, Result};
use crate::exec::Executor;
use crate::gf2::SystematicEncoder;
use crate::rng::stream_rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SnrConvention {
    /// Energy per information bit over N0.
    #[default]
    EbN0,
    /// Energy per channel symbol over N0.
    EsN0,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum CodewordMode {
    /// Transmit the all-zero codeword only.
    #[default]
    AllZero,
    /// Uniform messages, systematically encoded.
    RandomMessage,
}

/// Noise variance for BPSK (unit symbol energy) at `snr_db`.
pub fn noise_variance(snr_db: f64, rate: f64, convention: SnrConvention) -> f64 {
    let snr = libm::pow(10.0, snr_db / 10.0);
    match convention {
        SnrConvention::EbN0 => 1.0 / (2.0 * rate * snr),
        SnrConvention::EsN0 => 1.0 / (2.0 * snr),
    }
}

/// Channel LLRs `2 y / sigma^2`.
pub fn llr_awgn_bpsk(y: &[f64], noise_var: f64) -> Result<Vec<f64>> {
    if !(noise_var > 0.0 && noise_var.is_finite()) {
        return Err(Error::InvalidConfig(alloc::format!("noise variance must be > 0, got {noise_var}")));
    }
    let scale = 2.0 / noise_var;
    Ok(y.iter().map(|&v| scale * v).collect())
}

/// Origin of a sample's randomness.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SampleSeed {
    pub seed: u64,
    pub stream: u64,
}

/// One labelled channel observation.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelSample {
    /// Transmitted codeword (the label).
    pub x: Vec<u8>,
    /// Channel LLRs (the feature).
    pub v: Vec<f64>,
    pub snr_db: f64,
    pub seed: SampleSeed,
}

/// A code bound to an operating point; produces samples on demand.
#[derive(Debug, Clone)]
pub struct Channel {
    n: usize,
    rate: f64,
    snr_db: f64,
    noise_var: f64,
    encoder: Option<SystematicEncoder>,
}

impl Channel {
    pub fn new(h: &ParityCheckMatrix, snr_db: f64, convention: SnrConvention, mode: CodewordMode) -> Result<Self> {
        if !snr_db.is_finite() {
            return Err(Error::InvalidConfig(alloc::format!("SNR must be finite, got {snr_db}")));
        }
        let (rate, encoder) = match mode {
            CodewordMode::RandomMessage => {
                let enc = SystematicEncoder::full_rank(h)?;
                (enc.k() as f64 / h.n_vars() as f64, Some(enc))
            }
            CodewordMode::AllZero => {
                let k = h.n_vars() - crate::gf2::rank(h);
                (k as f64 / h.n_vars() as f64, None)
            }
        };
        if rate <= 0.0 {
            return Err(Error::InvalidConfig("code has rate 0".into()));
        }
        Ok(Channel { n: h.n_vars(), rate, snr_db, noise_var: noise_variance(snr_db, rate, convention), encoder })
    }

    pub fn rate(&self) -> f64 {
        self.rate
    }

    pub fn noise_var(&self) -> f64 {
        self.noise_var
    }

    pub fn snr_db(&self) -> f64 {
        self.snr_db
    }

    /// Sample number `stream` of `seed`; a pure function of its arguments.
    pub fn sample(&self, seed: u64, stream: u64) -> ChannelSample {
        let mut rng = stream_rng(seed, stream);
        let x = match &self.encoder {
            Some(enc) => {
                let msg: Vec<u8> = (0..enc.k()).map(|_| rng.random::<bool>() as u8).collect();
                enc.encode(&msg).expect("message length matches encoder")
            }
            None => alloc::vec![0u8; self.n],
        };
        let sigma = libm::sqrt(self.noise_var);
        let scale = 2.0 / self.noise_var;
        let v = x
            .iter()
            .map(|&bit| {
                let s = if bit == 0 { 1.0 } else { -1.0 };
                let noise: f64 = rng.sample(StandardNormal);
                scale * (s + sigma * noise)
            })
            .collect();
        ChannelSample { x, v, snr_db: self.snr_db, seed: SampleSeed { seed, stream } }
    }
}

/// `n_samples` labelled samples; sample `i` uses stream `i` of `seed`.
pub fn make_samples<E: Executor>(
    exec: &E,
    h: &ParityCheckMatrix,
    n_samples: usize,
    snr_db: f64,
    convention: SnrConvention,
    mode: CodewordMode,
    seed: u64,
) -> Result<Vec<ChannelSample>> {
    let ch = Channel::new(h, snr_db, convention, mode)?;
    Ok(exec.map(n_samples, |i| ch.sample(seed, i as u64)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exec::Sequential;

    fn hamming() -> ParityCheckMatrix {
        ParityCheckMatrix::from_rows(7, alloc::vec![alloc::vec![0, 2, 4, 6], alloc::vec![1, 2, 5, 6], alloc::vec![3, 4, 5, 6]])
            .unwrap()
    }

    #[test]
    fn llr_values() {
        assert_eq!(llr_awgn_bpsk(&[0.0, 1.0, -0.3], 1.0).unwrap(), alloc::vec![0.0, 2.0, -0.6]);
        assert!(llr_awgn_bpsk(&[1.0], 0.0).is_err());
        // Direct evaluation of log N(y; 1, s2) - log N(y; -1, s2).
        let (y, s2) = (0.37f64, 0.8f64);
        let direct = (-(y - 1.0).powi(2) / (2.0 * s2)) - (-(y + 1.0).powi(2) / (2.0 * s2));
        assert!((llr_awgn_bpsk(&[y], s2).unwrap()[0] - direct).abs() < 1e-14);
    }

    #[test]
    fn noise_variance_conventions() {
        assert!((noise_variance(0.0, 0.5, SnrConvention::EbN0) - 1.0).abs() < 1e-15);
        assert!((noise_variance(0.0, 0.5, SnrConvention::EsN0) - 0.5).abs() < 1e-15);
        assert!((noise_variance(10.0, 1.0, SnrConvention::EsN0) - 0.05).abs() < 1e-15);
    }

    #[test]
    fn samples_are_codewords_and_reproducible() {
        let h = hamming();
        let a = make_samples(&Sequential, &h, 50, 2.0, SnrConvention::EbN0, CodewordMode::RandomMessage, 11).unwrap();
        let b = make_samples(&Sequential, &h, 50, 2.0, SnrConvention::EbN0, CodewordMode::RandomMessage, 11).unwrap();
        assert_eq!(a, b);
        assert!(a.iter().all(|s| h.check_codeword(&s.x).unwrap()));
        assert!(a.iter().any(|s| s.x.iter().any(|&b| b == 1)));
        let z = make_samples(&Sequential, &h, 20, 2.0, SnrConvention::EbN0, CodewordMode::AllZero, 11).unwrap();
        assert!(z.iter().all(|s| s.x.iter().all(|&b| b == 0)));
        assert!(z.iter().all(|s| s.v.iter().all(|v| v.is_finite())));
    }

    #[test]
    fn empirical_noise_variance() {
        let h = hamming();
        let ch = Channel::new(&h, 1.0, SnrConvention::EbN0, CodewordMode::AllZero).unwrap();
        let nv = ch.noise_var();
        let mut sum = 0.0;
        let mut count = 0usize;
        for s in 0..15_000u64 {
            let sample = ch.sample(5, s);
            for &v in &sample.v {
                let y = v * nv / 2.0;
                sum += (y - 1.0) * (y - 1.0);
                count += 1;
            }
        }
        let est = sum / count as f64;
        assert!((est / nv - 1.0).abs() < 0.02, "estimated {est}, configured {nv}");
    }

    #[test]
    fn llrs_scale_with_inverse_noise() {
        let y = [0.3, -1.2, 0.9];
        let a = llr_awgn_bpsk(&y, 0.5).unwrap();
        let b = llr_awgn_bpsk(&y, 0.25).unwrap();
        for (p, q) in a.iter().zip(&b) {
            assert!((2.0 * p - q).abs() < 1e-14);
            assert_eq!(p.signum(), q.signum());
        }
    }

    #[test]
    fn rank_deficient_random_mode_fails() {
        let h = ParityCheckMatrix::from_rows(6, alloc::vec![alloc::vec![0, 1, 2], alloc::vec![2, 3, 4], alloc::vec![0, 1, 3, 4]])
            .unwrap();
        assert!(matches!(
            Channel::new(&h, 2.0, SnrConvention::EbN0, CodewordMode::RandomMessage),
            Err(Error::RankDeficient { .. })
        ));
        assert!(Channel::new(&h, 2.0, SnrConvention::EbN0, CodewordMode::AllZero).is_ok());
    }
}
