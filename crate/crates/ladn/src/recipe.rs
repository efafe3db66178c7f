//! End-to-end training runs: data generation, optimisation and the resulting
//! parameter file.

use ladn_core::channel::{make_samples, ChannelSample, CodewordMode, SnrConvention};
use ladn_core::rng::derive_seed;
use ladn_core::unfold::{self, EpochLog, LayerMode, LossConfig, TrainConfig, TrainOutcome};
use ladn_core::{CascadedSystem, DecoderParams, PiecewiseLinearPenalty, Variant};

use crate::error::{Error, Result};
use crate::exec::Pool;
use crate::io::CodeFile;
use crate::params_file::{ParamsFile, SlopeOrder, TrainingSection, MAX_SEED};
use crate::samples::{convention_tag, fingerprint, mode_tag};

/// Starting point of every L2 variant, and of `mu` for the piecewise one.
pub const INIT_ALPHA: f64 = 1.0;
pub const INIT_MU: f64 = 1.2;

/// Everything that determines a training run.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainRecipe {
    pub variant: Variant,
    pub n_stages: usize,
    /// Number of pieces `2L` of the piecewise penalty.
    pub n_pieces: usize,
    pub snr_db: f64,
    pub convention: SnrConvention,
    pub codeword_mode: CodewordMode,
    pub n_train: usize,
    pub n_val: usize,
    pub data_seed: u64,
    pub loss: LossConfig,
    pub train: TrainConfig,
}

impl TrainRecipe {
    /// Training at 2 dB with K = 50, sigma = 0.3 and 4e4 / 1e4 samples.
    pub fn c1(variant: Variant) -> Self {
        TrainRecipe {
            variant,
            n_stages: 50,
            n_pieces: 10,
            snr_db: 2.0,
            convention: SnrConvention::EbN0,
            codeword_mode: CodewordMode::RandomMessage,
            n_train: 40_000,
            n_val: 10_000,
            data_seed: 2024,
            loss: LossConfig { sigma: 0.3, layer_mode: LayerMode::AllStagesMean },
            train: TrainConfig { max_epochs: 10, ..TrainConfig::default() },
        }
    }

    pub fn initial_params(&self) -> Result<DecoderParams> {
        let k = self.n_stages;
        Ok(match self.variant {
            Variant::FixedL2 => return Err(Error::Config("fixed-l2 has nothing to train".into())),
            Variant::Ladn => DecoderParams::ladn(INIT_ALPHA, INIT_MU, k),
            Variant::LadnI => DecoderParams::ladn_i(INIT_ALPHA, INIT_MU, k),
            Variant::LadnP => {
                if self.n_pieces < 2 || self.n_pieces % 2 != 0 {
                    return Err(Error::Config(format!("number of pieces must be even and >= 2, got {}", self.n_pieces)));
                }
                let g = PiecewiseLinearPenalty::from_l2(INIT_ALPHA, self.n_pieces / 2)?;
                DecoderParams::ladn_p(g.slopes().to_vec(), INIT_MU, k)
            }
        })
    }

    /// Training and validation sets, drawn from independent seeds.
    pub fn datasets(&self, pool: &Pool, code: &CodeFile) -> Result<(Vec<ChannelSample>, Vec<ChannelSample>)> {
        let make = |n, tag| {
            make_samples(pool, &code.h, n, self.snr_db, self.convention, self.codeword_mode, derive_seed(self.data_seed, tag))
        };
        Ok((make(self.n_train, 1)?, make(self.n_val, 2)?))
    }
}

/// Result of [`run`].
#[derive(Debug, Clone)]
pub struct Trained {
    pub file: ParamsFile,
    pub outcome: TrainOutcome,
}

/// Generates the data, trains and assembles the parameter file.
pub fn run(
    pool: &Pool,
    code: &CodeFile,
    recipe: &TrainRecipe,
    on_epoch: &mut dyn FnMut(&EpochLog),
) -> Result<Trained> {
    for (name, seed) in [("data seed", recipe.data_seed), ("seed", recipe.train.seed)] {
        if seed > MAX_SEED {
            return Err(Error::Config(format!("{name} must be at most {MAX_SEED}, got {seed}")));
        }
    }
    let init = recipe.initial_params()?;
    let sys = CascadedSystem::build(&code.h);
    let (train, val) = recipe.datasets(pool, code)?;
    let outcome = unfold::train(pool, &sys, &init, &train, &val, &recipe.train, &recipe.loss, on_epoch)?;
    let t = &recipe.train;
    let mut file = ParamsFile::from_params(&outcome.params);
    file.training = Some(TrainingSection {
        code_sha256: code.sha256.clone(),
        snr_db: recipe.snr_db,
        snr_convention: convention_tag(recipe.convention).into(),
        codeword_mode: mode_tag(recipe.codeword_mode).into(),
        n_train: recipe.n_train,
        n_val: recipe.n_val,
        data_seed: recipe.data_seed,
        train_fingerprint: fingerprint(&train),
        val_fingerprint: fingerprint(&val),
        sigma: recipe.loss.sigma,
        layer_mode: recipe.loss.layer_mode.tag().into(),
        grad_mode: t.grad_mode.tag().into(),
        lr0: t.lr0,
        lr_decay: t.lr_decay,
        batch_size: t.batch_size,
        max_epochs: t.max_epochs,
        patience: t.patience,
        seed: t.seed,
        adam_beta1: t.adam_beta1,
        adam_beta2: t.adam_beta2,
        adam_eps: t.adam_eps,
        init_theta: init.theta(),
        initial_val_loss: outcome.initial_val_loss,
        best_val_loss: outcome.best_val_loss,
        best_epoch: outcome.best_epoch,
        epochs_run: outcome.log.len() - 1,
    });
    if recipe.variant == Variant::LadnP {
        file.slope_order = SlopeOrder::of(&outcome.params.slopes);
    }
    Ok(Trained { file, outcome })
}

/// Training log as CSV: `epoch,lr,train_loss,val_loss,<theta names...>`.
pub fn log_csv(names: &[String], log: &[EpochLog]) -> String {
    let mut out = format!("epoch,lr,train_loss,val_loss,{}\n", names.join(","));
    for e in log {
        let theta: Vec<String> = e.theta.iter().map(|v| v.to_string()).collect();
        out.push_str(&format!("{},{},{},{},{}\n", e.epoch, e.lr, e.train_loss, e.val_loss, theta.join(",")));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use ladn_core::unfold::GradMode;
    use ladn_core::ParityCheckMatrix;

    fn toy() -> CodeFile {
        let h = ParityCheckMatrix::from_rows(7, vec![vec![0, 2, 4, 6], vec![1, 2, 5, 6], vec![3, 4, 5, 6]]).unwrap();
        CodeFile { h, sha256: "toy".into() }
    }

    fn small(variant: Variant) -> TrainRecipe {
        let mut r = TrainRecipe::c1(variant);
        r.n_stages = 8;
        r.n_train = 200;
        r.n_val = 100;
        r.snr_db = 1.0;
        r.train = TrainConfig { lr0: 0.02, batch_size: 25, max_epochs: 3, ..TrainConfig::default() };
        r
    }

    #[test]
    fn initial_points() {
        let p = TrainRecipe::c1(Variant::LadnP).initial_params().unwrap();
        assert_eq!(p.slopes.len(), 5);
        for (a, b) in p.slopes.iter().zip([0.45, 0.35, 0.25, 0.15, 0.05]) {
            assert!((a - b).abs() < 1e-12);
        }
        assert_eq!(TrainRecipe::c1(Variant::LadnI).initial_params().unwrap().theta().len(), 51);
        assert!(TrainRecipe::c1(Variant::FixedL2).initial_params().is_err());
        let mut r = small(Variant::LadnI);
        r.data_seed = u64::MAX;
        assert!(run(&Pool::new(1).unwrap(), &toy(), &r, &mut |_| {}).is_err());
    }

    #[test]
    fn fd_training_is_reproducible_across_pools() {
        let mut r = small(Variant::LadnP);
        r.train.grad_mode = GradMode::CentralDifference;
        r.train.max_epochs = 1;
        let a = run(&Pool::new(1).unwrap(), &toy(), &r, &mut |_| {}).unwrap();
        let b = run(&Pool::new(3).unwrap(), &toy(), &r, &mut |_| {}).unwrap();
        assert_eq!(a.file.to_toml(), b.file.to_toml());
        assert!(a.file.slope_order.is_some());
    }

    #[test]
    fn trained_file_reloads() {
        let r = small(Variant::LadnI);
        let mut epochs = 0;
        let t = run(&Pool::new(2).unwrap(), &toy(), &r, &mut |_| epochs += 1).unwrap();
        let back = ParamsFile::from_toml(&t.file.to_toml(), "mem").unwrap();
        assert_eq!(back.params().unwrap(), t.outcome.params);
        let tr = back.training.unwrap();
        assert_eq!(tr.epochs_run + 1, epochs);
        assert!(tr.best_val_loss <= tr.initial_val_loss);
        let csv = log_csv(&t.outcome.params.theta_names(), &t.outcome.log);
        assert!(csv.starts_with("epoch,lr,train_loss,val_loss,alpha,mu_1,"));
        assert_eq!(csv.lines().count(), t.outcome.log.len() + 1);
    }
}
