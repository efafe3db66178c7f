use std::io::Read as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};
use ladn_core::channel::{make_samples, CodewordMode, SnrConvention};
use ladn_core::unfold::{GradMode, LayerMode, LossConfig, TrainConfig};
use ladn_core::{CascadedSystem, Decoder, DecoderParams, Variant};
use serde::Serialize;

use ladn::bench::{self, BenchConfig};
use ladn::exec::Pool;
use ladn::io::{read_code, read_text, sha256_hex, write_text};
use ladn::manifest::{self, RunManifest};
use ladn::params_file::{read_params, write_params, MAX_SEED};
use ladn::plotdata::{self, Curve};
use ladn::recipe::{self, TrainRecipe, INIT_ALPHA, INIT_MU};
use ladn::samples;

/// Exit code for a decode whose output fails a parity check.
const EXIT_PARITY: u8 = 2;

#[derive(Debug, Parser, Serialize)]
#[command(name = "ladn", version, about = "ADMM-penalized LP decoding with learnable parameters")]
struct Cli {
    /// Worker threads; 0 uses every core.
    #[arg(long, global = true, default_value_t = 0)]
    workers: usize,
    /// How SNR values are interpreted.
    #[arg(long, global = true, value_enum, default_value_t = Convention::EbN0)]
    snr_convention: Convention,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Debug, Subcommand, Serialize)]
enum Cmd {
    /// Decode LLR frames (one frame per line) and print the hard decisions.
    Decode(DecodeArgs),
    /// Train a learnable decoder and write its parameter file.
    Train(TrainArgs),
    /// Monte-Carlo block error rates.
    Bench(BenchArgs),
    /// Sampled penalty curves (u, g, g') for plotting.
    Plotdata(PlotArgs),
    /// Export labelled channel samples as text.
    Samples(SamplesArgs),
    /// Re-run the command recorded in a manifest.
    Replay(ReplayArgs),
}

#[derive(Debug, Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
enum Convention {
    EbN0,
    EsN0,
}

impl From<Convention> for SnrConvention {
    fn from(c: Convention) -> Self {
        match c {
            Convention::EbN0 => SnrConvention::EbN0,
            Convention::EsN0 => SnrConvention::EsN0,
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
enum Mode {
    AllZero,
    RandomMessage,
}

impl From<Mode> for CodewordMode {
    fn from(m: Mode) -> Self {
        match m {
            Mode::AllZero => CodewordMode::AllZero,
            Mode::RandomMessage => CodewordMode::RandomMessage,
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
enum TrainVariant {
    Ladn,
    LadnI,
    LadnP,
}

#[derive(Debug, Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
enum Grad {
    Analytic,
    Fd,
}

#[derive(Debug, Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
enum Layers {
    AllStagesMean,
    FinalStage,
}

#[derive(Debug, Args, Serialize)]
struct DecodeArgs {
    #[arg(long)]
    code: PathBuf,
    #[arg(long)]
    params: PathBuf,
    /// File of whitespace-separated LLRs, N per line.
    #[arg(long, conflicts_with = "stdin", required_unless_present = "stdin")]
    llr: Option<PathBuf>,
    /// Read LLRs from standard input.
    #[arg(long)]
    stdin: bool,
    /// Write per-stage residuals as CSV (frame,stage,residual).
    #[arg(long)]
    trace: Option<PathBuf>,
    /// Override the early-stop threshold of the parameter file (0 disables).
    #[arg(long)]
    residual_eps: Option<f64>,
}

#[derive(Debug, Args, Serialize)]
struct TrainArgs {
    #[arg(long)]
    code: PathBuf,
    #[arg(long, value_enum)]
    variant: TrainVariant,
    #[arg(long, default_value_t = 2.0)]
    snr: f64,
    /// Weight of the residual term in the loss.
    #[arg(long, default_value_t = 0.3)]
    sigma: f64,
    #[arg(long, default_value_t = 50)]
    stages: usize,
    /// Number of pieces 2L of the piecewise penalty (ladn-p).
    #[arg(long, default_value_t = 10)]
    pieces: usize,
    #[arg(long, default_value_t = 40_000)]
    n_train: usize,
    #[arg(long, default_value_t = 10_000)]
    n_val: usize,
    #[arg(long, default_value_t = 1e-3)]
    lr0: f64,
    /// Learning-rate multiplier applied after every epoch.
    #[arg(long, default_value_t = 0.5)]
    lr_decay: f64,
    #[arg(long, default_value_t = 100)]
    batch_size: usize,
    #[arg(long, default_value_t = 10)]
    max_epochs: usize,
    /// Epochs without validation improvement before stopping.
    #[arg(long, default_value_t = 3)]
    patience: usize,
    #[arg(long, value_enum, default_value_t = Grad::Analytic)]
    grad_mode: Grad,
    #[arg(long, value_enum, default_value_t = Layers::AllStagesMean)]
    layer_mode: Layers,
    #[arg(long, value_enum, default_value_t = Mode::RandomMessage)]
    codeword_mode: Mode,
    /// Seed of the training and validation data.
    #[arg(long, default_value_t = 2024, value_parser = seed_arg())]
    data_seed: u64,
    /// Seed of the batch shuffling.
    #[arg(long, default_value_t = 1, value_parser = seed_arg())]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args, Serialize)]
struct BenchArgs {
    #[arg(long)]
    code: PathBuf,
    /// Parameter file of a decoder to evaluate; repeatable.
    #[arg(long)]
    params: Vec<PathBuf>,
    /// Also evaluate the fixed-L2 decoder (alpha 1, mu 1.2) with --stages stages.
    #[arg(long)]
    baseline: bool,
    #[arg(long, default_value_t = 50)]
    stages: usize,
    /// Comma-separated SNR points in dB.
    #[arg(long, value_delimiter = ',', default_value = "1,2,3,4")]
    snr: Vec<f64>,
    #[arg(long, default_value_t = 100)]
    min_errors: u64,
    #[arg(long, default_value_t = 1_000_000)]
    max_frames: u64,
    #[arg(long, value_enum, default_value_t = Mode::AllZero)]
    codeword_mode: Mode,
    #[arg(long, default_value_t = 1, value_parser = seed_arg())]
    seed: u64,
    /// Early-stop threshold on the residual; 0 disables early stopping.
    #[arg(long, default_value_t = ladn_core::admm::DEFAULT_RESIDUAL_EPS)]
    residual_eps: f64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args, Serialize)]
struct PlotArgs {
    /// L2 penalty coefficients to sample.
    #[arg(long, value_delimiter = ',', default_value = "1")]
    alpha: Vec<f64>,
    /// Learned parameter files whose penalty to sample; repeatable.
    #[arg(long)]
    params: Vec<PathBuf>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args, Serialize)]
struct SamplesArgs {
    #[arg(long)]
    code: PathBuf,
    #[arg(long, default_value_t = 2.0)]
    snr: f64,
    #[arg(long)]
    n: usize,
    #[arg(long, value_enum, default_value_t = Mode::AllZero)]
    codeword_mode: Mode,
    #[arg(long, default_value_t = 1, value_parser = seed_arg())]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args, Serialize)]
struct ReplayArgs {
    manifest: PathBuf,
    /// Replay even if input files changed since the recorded run.
    #[arg(long)]
    force: bool,
}

/// Seeds are stored as TOML integers, which are signed.
fn seed_arg() -> clap::builder::RangedU64ValueParser<u64> {
    clap::value_parser!(u64).range(..=MAX_SEED)
}

fn main() -> ExitCode {
    let args: Vec<String> = std::env::args().skip(1).collect();
    match run(args) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}

fn run(args: Vec<String>) -> anyhow::Result<ExitCode> {
    let cli = match Cli::try_parse_from(std::iter::once("ladn".to_string()).chain(args.iter().cloned())) {
        Ok(c) => c,
        // Help and version exit 0; usage errors share exit code 1 with other errors, 2 means parity failure.
        Err(e) if !e.use_stderr() => e.exit(),
        Err(e) => {
            let _ = e.print();
            return Ok(ExitCode::FAILURE);
        }
    };
    let pool = Pool::new(cli.workers)?;
    let conv: SnrConvention = cli.snr_convention.into();
    let mut m = RunManifest::new(subcommand_name(&cli.cmd), None, args);
    m.config = toml::Table::try_from(&cli).context("recording configuration")?;
    match &cli.cmd {
        Cmd::Decode(a) => decode(a, &mut m),
        Cmd::Train(a) => train(a, &pool, conv, &mut m).map(|_| ExitCode::SUCCESS),
        Cmd::Bench(a) => bench_cmd(a, &pool, conv, &mut m).map(|_| ExitCode::SUCCESS),
        Cmd::Plotdata(a) => plot(a, &mut m).map(|_| ExitCode::SUCCESS),
        Cmd::Samples(a) => export_samples(a, &pool, conv, &mut m).map(|_| ExitCode::SUCCESS),
        Cmd::Replay(a) => replay(a),
    }
}

fn subcommand_name(c: &Cmd) -> &'static str {
    match c {
        Cmd::Decode(_) => "decode",
        Cmd::Train(_) => "train",
        Cmd::Bench(_) => "bench",
        Cmd::Plotdata(_) => "plotdata",
        Cmd::Samples(_) => "samples",
        Cmd::Replay(_) => "replay",
    }
}

fn finish(m: &mut RunManifest, primary: &Path, outputs: &[&Path]) -> anyhow::Result<()> {
    for o in outputs {
        m.output(o);
    }
    m.write(&manifest::path_for(primary))?;
    Ok(())
}

fn parse_llr_frames(text: &str, n: usize, origin: &str) -> anyhow::Result<Vec<Vec<f64>>> {
    let mut frames = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let frame: Vec<f64> = line
            .split_whitespace()
            .map(|f| f.parse::<f64>().ok().filter(|v| v.is_finite()))
            .collect::<Option<_>>()
            .with_context(|| format!("{origin}: line {}: not a list of finite numbers", i + 1))?;
        if frame.len() != n {
            bail!("{origin}: line {}: {} LLRs, code length is {n}", i + 1, frame.len());
        }
        frames.push(frame);
    }
    if frames.is_empty() {
        bail!("{origin}: no LLR frames");
    }
    Ok(frames)
}

fn decode(a: &DecodeArgs, m: &mut RunManifest) -> anyhow::Result<ExitCode> {
    let code = read_code(&a.code)?;
    let loaded = read_params(&a.params)?;
    m.input(&a.code, &code.sha256);
    m.input(&a.params, &loaded.sha256);
    let mut params = loaded.params;
    if let Some(eps) = a.residual_eps {
        params.residual_eps = eps;
    }
    let (text, origin) = match &a.llr {
        Some(p) => {
            let t = read_text(p)?;
            m.input(p, &sha256_hex(t.as_bytes()));
            (t, p.display().to_string())
        }
        None => {
            let mut t = String::new();
            std::io::stdin().read_to_string(&mut t).context("reading standard input")?;
            (t, "<stdin>".to_string())
        }
    };
    let frames = parse_llr_frames(&text, code.h.n_vars(), &origin)?;
    let sys = CascadedSystem::build(&code.h);
    let mut dec = Decoder::new(&sys, &params)?;
    let mut all_valid = true;
    let mut trace_csv = String::from("frame,stage,residual\n");
    for (f, llr) in frames.iter().enumerate() {
        let out = dec.decode(llr, a.trace.is_some())?;
        let valid = code.h.check_codeword(&out.bits)?;
        all_valid &= valid;
        let bits: String = out.bits.iter().map(|&b| if b == 0 { '0' } else { '1' }).collect();
        println!("{bits}");
        println!("residual={} stages={} valid={valid}", out.residual, out.stages_run);
        if let Some(t) = &out.trace {
            for (k, r) in t.residuals.iter().enumerate() {
                trace_csv.push_str(&format!("{f},{},{r}\n", k + 1));
            }
        }
    }
    if let Some(p) = &a.trace {
        write_text(p, &trace_csv)?;
        finish(m, p, &[p])?;
    }
    Ok(if all_valid { ExitCode::SUCCESS } else { ExitCode::from(EXIT_PARITY) })
}

fn train(a: &TrainArgs, pool: &Pool, conv: SnrConvention, m: &mut RunManifest) -> anyhow::Result<()> {
    let code = read_code(&a.code)?;
    m.input(&a.code, &code.sha256);
    m.seed = Some(a.seed);
    let variant = match a.variant {
        TrainVariant::Ladn => Variant::Ladn,
        TrainVariant::LadnI => Variant::LadnI,
        TrainVariant::LadnP => Variant::LadnP,
    };
    let layer_mode = match a.layer_mode {
        Layers::AllStagesMean => LayerMode::AllStagesMean,
        Layers::FinalStage => LayerMode::FinalStage,
    };
    let r = TrainRecipe {
        variant,
        n_stages: a.stages,
        n_pieces: a.pieces,
        snr_db: a.snr,
        convention: conv,
        codeword_mode: a.codeword_mode.into(),
        n_train: a.n_train,
        n_val: a.n_val,
        data_seed: a.data_seed,
        loss: LossConfig::new(a.sigma, layer_mode)?,
        train: TrainConfig {
            lr0: a.lr0,
            lr_decay: a.lr_decay,
            batch_size: a.batch_size,
            max_epochs: a.max_epochs,
            patience: a.patience,
            grad_mode: match a.grad_mode {
                Grad::Analytic => GradMode::Analytic,
                Grad::Fd => GradMode::CentralDifference,
            },
            seed: a.seed,
            ..TrainConfig::default()
        },
    };
    eprintln!(
        "training {} on {} (N={}, K={}, {} + {} samples at {} dB, {} worker(s))",
        variant.tag(),
        a.code.display(),
        code.h.n_vars(),
        a.stages,
        a.n_train,
        a.n_val,
        a.snr,
        pool.workers()
    );
    let t = recipe::run(pool, &code, &r, &mut |e| {
        if e.epoch == 0 {
            eprintln!("epoch 0: val_loss={:.6}", e.val_loss);
        } else {
            eprintln!("epoch {}: lr={:e} train_loss={:.6} val_loss={:.6}", e.epoch, e.lr, e.train_loss, e.val_loss);
        }
    })?;
    write_params(&a.out, &t.file)?;
    let mut log_path = a.out.as_os_str().to_owned();
    log_path.push(".log.csv");
    let log_path = PathBuf::from(log_path);
    write_text(&log_path, &recipe::log_csv(&t.outcome.params.theta_names(), &t.outcome.log))?;
    if let Some(s) = &t.file.slope_order {
        if !s.holds {
            eprintln!("note: learned slopes violate {} (phi_1 = {}, phi_L = {})", s.claim, s.phi_first, s.phi_last);
        }
    }
    eprintln!(
        "best epoch {}: val_loss {:.6} (initial {:.6}); wrote {}",
        t.outcome.best_epoch,
        t.outcome.best_val_loss,
        t.outcome.initial_val_loss,
        a.out.display()
    );
    finish(m, &a.out, &[&a.out, &log_path])
}

fn bench_cmd(a: &BenchArgs, pool: &Pool, conv: SnrConvention, m: &mut RunManifest) -> anyhow::Result<()> {
    let code = read_code(&a.code)?;
    m.input(&a.code, &code.sha256);
    m.seed = Some(a.seed);
    let mut decoders: Vec<(String, DecoderParams, String)> = Vec::new();
    if a.baseline {
        decoders.push(("fixed-l2".into(), DecoderParams::fixed_l2(INIT_ALPHA, INIT_MU, a.stages), "-".into()));
    }
    for p in &a.params {
        let l = read_params(p)?;
        m.input(p, &l.sha256);
        let stem = p.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
        decoders.push((format!("{}:{stem}", l.params.variant.tag()), l.params, l.sha256));
    }
    if decoders.is_empty() {
        bail!("nothing to benchmark: pass --params and/or --baseline");
    }
    let cfg = BenchConfig {
        min_errors: a.min_errors,
        max_frames: a.max_frames,
        codeword_mode: a.codeword_mode.into(),
        convention: conv,
        seed: a.seed,
        residual_eps: Some(a.residual_eps),
    };
    let mut meta = vec![
        ("tool".to_string(), format!("ladn {}", env!("CARGO_PKG_VERSION"))),
        ("seed".into(), a.seed.to_string()),
        ("code".into(), a.code.display().to_string()),
        ("code_sha256".into(), code.sha256.clone()),
        ("snr_convention".into(), samples::convention_tag(conv).into()),
        ("codeword_mode".into(), samples::mode_tag(cfg.codeword_mode).into()),
        ("min_errors".into(), a.min_errors.to_string()),
        ("max_frames".into(), a.max_frames.to_string()),
        ("residual_eps".into(), a.residual_eps.to_string()),
    ];
    let mut all = Vec::new();
    let mut per_decoder = Vec::new();
    for (tag, params, hash) in &decoders {
        meta.push((format!("params_sha256[{tag}]"), hash.clone()));
        let pts = bench::run_bler(pool, &code.h, params, tag, &a.snr, &cfg)?;
        for p in &pts {
            eprintln!("{tag} {} dB: {} errors / {} frames, bler {:.3e}", p.snr_db, p.errors, p.frames, p.bler);
        }
        all.extend(pts.iter().cloned());
        per_decoder.push((tag.clone(), pts));
    }
    write_text(&a.out, &bench::to_csv(&all, &meta))?;
    let mut outputs = vec![a.out.clone()];
    if per_decoder.len() > 1 {
        let (base_tag, base) = &per_decoder[0];
        let mut text = String::new();
        for (i, (tag, pts)) in per_decoder.iter().enumerate().skip(1) {
            let rows = bench::compare(pts, base)?;
            let csv = bench::comparison_csv(tag, base_tag, &rows);
            text.push_str(if i == 1 { &csv } else { csv.split_once('\n').map(|x| x.1).unwrap_or("") });
        }
        let mut p = a.out.as_os_str().to_owned();
        p.push(".compare.csv");
        let p = PathBuf::from(p);
        write_text(&p, &text)?;
        outputs.push(p);
    }
    let refs: Vec<&Path> = outputs.iter().map(|p| p.as_path()).collect();
    finish(m, &a.out, &refs)
}

fn plot(a: &PlotArgs, m: &mut RunManifest) -> anyhow::Result<()> {
    let mut curves = Vec::new();
    for &alpha in &a.alpha {
        curves.push(Curve::l2(format!("l2(alpha={alpha})"), alpha)?);
    }
    for p in &a.params {
        let l = read_params(p)?;
        m.input(p, &l.sha256);
        let stem = p.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
        let params = &l.params;
        curves.push(if params.variant.uses_l2() {
            Curve::l2(format!("learned-l2:{stem}"), params.alpha)?
        } else {
            Curve::piecewise(format!("learned-pl:{stem}"), &params.slopes)?
        });
    }
    write_text(&a.out, &plotdata::to_csv(&curves)?)?;
    finish(m, &a.out, &[&a.out])
}

fn export_samples(a: &SamplesArgs, pool: &Pool, conv: SnrConvention, m: &mut RunManifest) -> anyhow::Result<()> {
    let code = read_code(&a.code)?;
    m.input(&a.code, &code.sha256);
    m.seed = Some(a.seed);
    let mode: CodewordMode = a.codeword_mode.into();
    let s = make_samples(pool, &code.h, a.n, a.snr, conv, mode, a.seed)?;
    let meta = format!(
        "n={} snr_convention={} codeword_mode={} seed={} fingerprint={}",
        code.h.n_vars(),
        samples::convention_tag(conv),
        samples::mode_tag(mode),
        a.seed,
        samples::fingerprint(&s)
    );
    write_text(&a.out, &samples::to_text(&s, &meta))?;
    finish(m, &a.out, &[&a.out])
}

fn replay(a: &ReplayArgs) -> anyhow::Result<ExitCode> {
    let m = RunManifest::read(&a.manifest)?;
    let changed = m.changed_inputs();
    if !changed.is_empty() && !a.force {
        bail!("inputs changed since the recorded run: {} (use --force to replay anyway)", changed.join(", "));
    }
    if m.version != env!("CARGO_PKG_VERSION") {
        eprintln!("note: manifest written by version {}, running {}", m.version, env!("CARGO_PKG_VERSION"));
    }
    run(m.args)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cli_definition_is_consistent() {
        use clap::CommandFactory;
        Cli::command().debug_assert();
    }

    #[test]
    fn llr_frames() {
        let f = parse_llr_frames("1 2 3\n\n# c\n-1 0.5 2e1\n", 3, "x").unwrap();
        assert_eq!(f, vec![vec![1.0, 2.0, 3.0], vec![-1.0, 0.5, 20.0]]);
        assert!(parse_llr_frames("1 2\n", 3, "x").is_err());
        assert!(parse_llr_frames("1 nan 2\n", 3, "x").is_err());
        assert!(parse_llr_frames("1 two 2\n", 3, "x").is_err());
        assert!(parse_llr_frames("", 3, "x").is_err());
    }
}
