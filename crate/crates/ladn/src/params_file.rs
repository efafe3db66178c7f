//! Versioned TOML parameter files.
//!
//! ```toml
//! format = "ladn-params"
//! version = 1
//!
//! [decoder]
//! variant = "ladn-i"          # fixed-l2 | ladn | ladn-i | ladn-p
//! stages = 50
//! alpha = 1.0                 # L2 variants only
//! slopes = [0.45, 0.35]       # ladn-p only
//! mu_schedule = "per-stage"   # shared | per-stage
//! mu = [1.2, 1.2]             # one value, or one per stage
//! residual_eps = 0.0
//!
//! [training]                  # present on trained files
//! ...
//!
//! [slope_order]               # ladn-p training only
//! claim = "phi_1 >= phi_L"
//! holds = true
//! ```
//!
//! Floats are written in shortest round-trip form, so reloading a file gives
//! bit-identical parameters.

use std::path::Path;

use ladn_core::{DecoderParams, MuSchedule, Variant};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::io::{read_text, sha256_hex, write_text};

pub const FORMAT: &str = "ladn-params";
pub const VERSION: u32 = 1;
/// Largest seed a TOML document can hold.
pub const MAX_SEED: u64 = i64::MAX as u64;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DecoderSection {
    pub variant: String,
    pub stages: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub slopes: Option<Vec<f64>>,
    pub mu_schedule: String,
    pub mu: Vec<f64>,
    pub residual_eps: f64,
}

/// How a parameter set was trained.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainingSection {
    pub code_sha256: String,
    pub snr_db: f64,
    pub snr_convention: String,
    pub codeword_mode: String,
    pub n_train: usize,
    pub n_val: usize,
    pub data_seed: u64,
    /// SHA-256 of the training and validation sample sets.
    pub train_fingerprint: String,
    pub val_fingerprint: String,
    pub sigma: f64,
    pub layer_mode: String,
    pub grad_mode: String,
    pub lr0: f64,
    pub lr_decay: f64,
    pub batch_size: usize,
    pub max_epochs: usize,
    pub patience: usize,
    pub seed: u64,
    pub adam_beta1: f64,
    pub adam_beta2: f64,
    pub adam_eps: f64,
    /// Learnable parameters before training, in `theta` order.
    pub init_theta: Vec<f64>,
    pub initial_val_loss: f64,
    pub best_val_loss: f64,
    pub best_epoch: usize,
    pub epochs_run: usize,
}

/// Record of whether learned slopes decrease from the outer pieces to the
/// centre.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SlopeOrder {
    pub claim: String,
    pub holds: bool,
    pub phi_first: f64,
    pub phi_last: f64,
}

impl SlopeOrder {
    pub fn of(slopes: &[f64]) -> Option<Self> {
        let (&first, &last) = (slopes.first()?, slopes.last()?);
        Some(SlopeOrder { claim: "phi_1 >= phi_L".into(), holds: first >= last, phi_first: first, phi_last: last })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParamsFile {
    pub format: String,
    pub version: u32,
    pub decoder: DecoderSection,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub training: Option<TrainingSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub slope_order: Option<SlopeOrder>,
}

impl ParamsFile {
    pub fn from_params(p: &DecoderParams) -> Self {
        let l2 = p.variant.uses_l2();
        let (mu_schedule, mu) = match &p.mu {
            MuSchedule::Shared(m) => ("shared", vec![*m]),
            MuSchedule::PerStage(m) => ("per-stage", m.clone()),
        };
        ParamsFile {
            format: FORMAT.into(),
            version: VERSION,
            decoder: DecoderSection {
                variant: p.variant.tag().into(),
                stages: p.n_stages,
                alpha: l2.then_some(p.alpha),
                slopes: (!l2).then(|| p.slopes.clone()),
                mu_schedule: mu_schedule.into(),
                mu,
                residual_eps: p.residual_eps,
            },
            training: None,
            slope_order: None,
        }
    }

    /// Validated decoder parameters.
    pub fn params(&self) -> Result<DecoderParams> {
        let bad = |m: String| Error::Config(m);
        if self.format != FORMAT {
            return Err(bad(format!("format must be \"{FORMAT}\", got \"{}\"", self.format)));
        }
        if self.version != VERSION {
            return Err(bad(format!("unsupported params version {}", self.version)));
        }
        let d = &self.decoder;
        let variant = Variant::from_tag(&d.variant).ok_or_else(|| bad(format!("unknown variant \"{}\"", d.variant)))?;
        let mu = match (d.mu_schedule.as_str(), d.mu.as_slice()) {
            ("shared", [m]) => MuSchedule::Shared(*m),
            ("shared", _) => return Err(bad("shared mu schedule needs exactly one value".into())),
            ("per-stage", m) => MuSchedule::PerStage(m.to_vec()),
            (other, _) => return Err(bad(format!("unknown mu schedule \"{other}\""))),
        };
        let (alpha, slopes) = if variant.uses_l2() {
            if d.slopes.is_some() {
                return Err(bad(format!("{} takes alpha, not slopes", d.variant)));
            }
            (d.alpha.ok_or_else(|| bad(format!("{} needs alpha", d.variant)))?, Vec::new())
        } else {
            if d.alpha.is_some() {
                return Err(bad("ladn-p takes slopes, not alpha".into()));
            }
            (0.0, d.slopes.clone().ok_or_else(|| bad("ladn-p needs slopes".into()))?)
        };
        let p = DecoderParams { variant, alpha, slopes, mu, n_stages: d.stages, residual_eps: d.residual_eps };
        p.validate()?;
        Ok(p)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("params file serializes")
    }

    pub fn from_toml(text: &str, origin: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::format(origin, e.to_string()))
    }
}

/// A loaded parameter file and the hash of its bytes.
#[derive(Debug, Clone)]
pub struct LoadedParams {
    pub file: ParamsFile,
    pub params: DecoderParams,
    pub sha256: String,
}

pub fn read_params(path: &Path) -> Result<LoadedParams> {
    let text = read_text(path)?;
    let file = ParamsFile::from_toml(&text, &path.display().to_string())?;
    let params = file.params().map_err(|e| Error::format(path.display(), e.to_string()))?;
    Ok(LoadedParams { file, params, sha256: sha256_hex(text.as_bytes()) })
}

pub fn write_params(path: &Path, file: &ParamsFile) -> Result<()> {
    write_text(path, &file.to_toml())
}
