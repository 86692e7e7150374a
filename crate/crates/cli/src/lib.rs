//! `drawpass` subcommands.

mod manifest;

pub use manifest::{file_digest, RunManifest};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};
use std::sync::Arc;

use drawpass_core::data::{
    export_dataset, generate_synthetic, import_dataset, load_dataset, make_split, FormatSpec,
    SplitSpec, SynthConfig,
};
use drawpass_core::evalproto::{run_protocol, ImpostorPick, ProtocolConfig, Scorer, ScorerKind};
use drawpass_core::pairs::{build_training_pairs, prepare_dataset, PairPlan, Pairing};
use drawpass_core::rnn::{
    checkpoint, train_from, SiameseArch, SiameseModel, TrainConfig, TrainState,
};
use drawpass_core::signal::DEFAULT_RATE_HZ;

pub const DATA_DIR_ENV: &str = "DRAWPASS_DATA_DIR";

#[derive(Debug, Parser)]
#[command(
    name = "drawpass",
    version,
    about = "Drawn-password biometrics: data, training, evaluation and serving"
)]
pub struct Cli {
    /// Cap on worker threads (default: all cores).
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    /// Print machine-readable JSON instead of text.
    #[arg(long, global = true)]
    pub json: bool,
    /// Base directory for relative data paths.
    #[arg(long, global = true, env = DATA_DIR_ENV)]
    pub data_dir: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Import a dataset into the canonical format.
    Import(ImportArgs),
    /// Generate a synthetic dataset.
    Synth(SynthArgs),
    /// Train a Siamese model.
    Train(TrainArgs),
    /// Run the evaluation protocol with one scorer.
    Eval(EvalArgs),
    /// Start the HTTP verification service.
    Serve(ServeArgs),
}

#[derive(Debug, Args)]
pub struct ImportArgs {
    /// Input file or directory.
    #[arg(long)]
    pub input: PathBuf,
    /// `canonical`, `ebiodigit`, `mobiletouch`, or a JSON mapping file.
    #[arg(long, default_value = "canonical")]
    pub format: String,
    /// Output dataset (canonical JSON lines).
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum SynthPreset {
    Easy,
    Moderate,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    /// Starting configuration; flags below override single fields.
    #[arg(long, value_enum, default_value = "easy")]
    pub preset: SynthPreset,
    /// JSON SynthConfig file (replaces the preset).
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub n_users: Option<usize>,
    /// Comma-separated labels.
    #[arg(long, value_delimiter = ',')]
    pub characters: Option<Vec<String>>,
    #[arg(long)]
    pub sessions: Option<u32>,
    #[arg(long)]
    pub samples_per_cell: Option<u32>,
    #[arg(long)]
    pub prototype_jitter: Option<f64>,
    #[arg(long)]
    pub inter_user_spread: Option<f64>,
    #[arg(long)]
    pub intra_user_noise: Option<f64>,
    #[arg(long)]
    pub session_drift: Option<f64>,
    #[arg(long)]
    pub time_warp: Option<f64>,
    #[arg(long)]
    pub sensor_jitter: Option<f64>,
    #[arg(long)]
    pub duration_ms: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub out: PathBuf,
}

/// Everything `train` needs besides the dataset; all fields have defaults.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainJob {
    pub train: TrainConfig,
    pub arch: SiameseArch,
    pub pairing: Pairing,
    pub pairs: PairPlan,
    pub split: SplitSpec,
    pub resample_rate_hz: f64,
}

impl Default for TrainJob {
    fn default() -> Self {
        TrainJob {
            train: TrainConfig::default(),
            arch: SiameseArch::standard(),
            pairing: Pairing::aligned(),
            pairs: PairPlan {
                max_genuine_per_cell: Some(2),
                ..PairPlan::default()
            },
            split: default_split(),
            resample_rate_hz: DEFAULT_RATE_HZ,
        }
    }
}

fn default_split() -> SplitSpec {
    SplitSpec::Fraction {
        dev_fraction: 0.6,
        required_sessions: vec![],
        train_fraction: 0.8,
    }
}

#[derive(Debug, Clone, Copy, ValueEnum, PartialEq, Eq)]
pub enum PairingArg {
    Aligned,
    Linear,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[arg(long)]
    pub dataset: PathBuf,
    /// JSON TrainJob file.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub checkpoint_out: PathBuf,
    /// Continue from this checkpoint (epoch counter and optimizer state).
    #[arg(long)]
    pub resume: Option<PathBuf>,
    /// Overrides the config's final epoch.
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub learning_rate: Option<f64>,
    /// Overrides the config's pairing: aligned trains TA-RNN, linear trains RNN.
    #[arg(long, value_enum)]
    pub pairing: Option<PairingArg>,
    /// Where the training log goes (default: next to the checkpoint).
    #[arg(long)]
    pub log_out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[arg(long)]
    pub dataset: PathBuf,
    #[arg(long, value_parser = parse_scorer)]
    pub scorer: ScorerKind,
    /// Model for rnn / ta-rnn.
    #[arg(long)]
    pub checkpoint: Option<PathBuf>,
    /// JSON ProtocolConfig file; flags override its fields.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Enrollment samples per character.
    #[arg(long = "Z", alias = "z")]
    pub z: Option<usize>,
    /// Comma-separated session indices.
    #[arg(long, value_delimiter = ',')]
    pub enroll_sessions: Option<Vec<u32>>,
    #[arg(long)]
    pub test_session: Option<u32>,
    #[arg(long)]
    pub allow_session_overlap: bool,
    /// `1..9` or a comma-separated list.
    #[arg(long)]
    pub password_lengths: Option<String>,
    /// Comma-separated fused password (default: characters ranked by EER).
    #[arg(long, value_delimiter = ',')]
    pub password: Option<Vec<String>>,
    /// `all`, `ebiodigit`, `mobiletouch`, or a JSON SplitSpec file.
    #[arg(long)]
    pub split: Option<String>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Draw the impostor repetition with the seed instead of taking the first.
    #[arg(long)]
    pub seeded_impostors: bool,
    #[arg(long)]
    pub report_out: PathBuf,
    /// Also write the flat score list.
    #[arg(long)]
    pub csv_out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ServeArgs {
    #[arg(long, default_value_t = 8080)]
    pub port: u16,
    #[arg(long, default_value = "127.0.0.1")]
    pub host: String,
    #[arg(long, value_parser = parse_scorer, default_value = "ta-rnn")]
    pub scorer: ScorerKind,
    #[arg(long)]
    pub checkpoint: Option<PathBuf>,
    /// Fixed decision threshold (overrides the calibration file).
    #[arg(long)]
    pub threshold: Option<f64>,
    /// Score lists (`{genuine, impostor}`) or a protocol report.
    #[arg(long)]
    pub calibration: Option<PathBuf>,
    /// Fused length read from a calibration report.
    #[arg(long, default_value_t = 4)]
    pub calibration_length: usize,
    /// Enrollment store file (default: in-memory).
    #[arg(long)]
    pub store: Option<PathBuf>,
    #[arg(long = "Z", alias = "z", default_value_t = 1)]
    pub z: usize,
    /// Comma-separated password alphabet (default: any label).
    #[arg(long, value_delimiter = ',')]
    pub alphabet: Option<Vec<String>>,
    /// Keep raw verification attempts in the store.
    #[arg(long)]
    pub debug_store_attempts: bool,
}

fn parse_scorer(s: &str) -> Result<ScorerKind, String> {
    s.parse()
}

/// `1..9`, `2..=4` or `1,2,4`.
pub fn parse_lengths(s: &str) -> Result<Vec<usize>> {
    let s = s.trim();
    if let Some((a, b)) = s.split_once("..") {
        let b = b.trim_start_matches('=');
        let (a, b): (usize, usize) = (a.trim().parse()?, b.trim().parse()?);
        if a == 0 || b < a {
            bail!("bad length range {s:?}");
        }
        return Ok((a..=b).collect());
    }
    s.split(',')
        .map(|x| {
            x.trim()
                .parse::<usize>()
                .with_context(|| format!("bad length {x:?}"))
        })
        .collect()
}

struct Ctx {
    json: bool,
    data_dir: Option<PathBuf>,
}

impl Ctx {
    fn path(&self, p: &Path) -> PathBuf {
        match &self.data_dir {
            Some(d) if p.is_relative() => d.join(p),
            _ => p.to_path_buf(),
        }
    }

    fn emit(&self, text: &str, value: serde_json::Value) {
        if self.json {
            println!("{}", serde_json::to_string(&value).expect("json"));
        } else {
            println!("{text}");
        }
    }
}

/// Runs a parsed command line; returns the process exit code.
pub fn run(cli: Cli) -> i32 {
    if let Some(n) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new()
            .num_threads(n.max(1))
            .build_global()
        {
            log::warn!("thread pool already initialized: {e}");
        }
    }
    let ctx = Ctx {
        json: cli.json,
        data_dir: cli.data_dir,
    };
    let r = match cli.command {
        Command::Import(a) => cmd_import(&ctx, a),
        Command::Synth(a) => cmd_synth(&ctx, a),
        Command::Train(a) => cmd_train(&ctx, a),
        Command::Eval(a) => cmd_eval(&ctx, a),
        Command::Serve(a) => cmd_serve(&ctx, a),
    };
    match r {
        Ok(()) => 0,
        Err(e) => {
            if ctx.json {
                println!("{}", serde_json::json!({ "error": format!("{e:#}") }));
            }
            eprintln!("error: {e:#}");
            1
        }
    }
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let text =
        std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))
}

fn cmd_import(ctx: &Ctx, a: ImportArgs) -> Result<()> {
    let mut m = RunManifest::start("import");
    let input = ctx.path(&a.input);
    let out = ctx.path(&a.out);
    if !input.exists() {
        bail!("input path {} does not exist", input.display());
    }
    let spec = FormatSpec::resolve(&a.format)?;
    m.set_config(&spec);
    let report = import_dataset(&input, &spec)?;
    export_dataset(&report.dataset, &out)?;
    for i in &report.inputs {
        m.inputs.push(manifest::InputEntry {
            path: i.path.clone(),
            sha256: i.sha256.clone(),
        });
    }
    m.outputs.push(out.display().to_string());
    m.extra = serde_json::to_value(&report.summary)?;
    let mpath = m.finish_and_write(&out)?;
    let s = &report.summary;
    ctx.emit(
        &format!(
            "imported {} of {} parsed sample(s), {} quarantined, {} warning(s)\ndataset: {}\nmanifest: {}",
            s.imported,
            s.parsed,
            s.quarantined.len(),
            s.warnings.len(),
            out.display(),
            mpath.display()
        ),
        serde_json::json!({
            "imported": s.imported,
            "parsed": s.parsed,
            "quarantined": s.quarantined.len(),
            "warnings": s.warnings,
            "dataset": out,
            "manifest": mpath,
        }),
    );
    Ok(())
}

fn synth_config(a: &SynthArgs) -> Result<SynthConfig> {
    let mut c = match &a.config {
        Some(p) => read_json(p)?,
        None => match a.preset {
            SynthPreset::Easy => SynthConfig::easy(0),
            SynthPreset::Moderate => SynthConfig::moderate(0),
        },
    };
    macro_rules! set {
        ($($f:ident),*) => { $( if let Some(v) = a.$f.clone() { c.$f = v; } )* };
    }
    set!(
        n_users,
        characters,
        sessions,
        samples_per_cell,
        prototype_jitter,
        inter_user_spread,
        intra_user_noise,
        session_drift,
        time_warp,
        sensor_jitter,
        duration_ms,
        seed
    );
    Ok(c)
}

fn cmd_synth(ctx: &Ctx, a: SynthArgs) -> Result<()> {
    let mut m = RunManifest::start("synth");
    let cfg = synth_config(&a)?;
    m.set_config(&cfg);
    m.seed = Some(cfg.seed);
    let out = ctx.path(&a.out);
    let ds = generate_synthetic(&cfg)?;
    if ds.is_empty() {
        let w = "synthetic configuration produced an empty dataset";
        log::warn!("{w}");
        eprintln!("warning: {w}");
    }
    export_dataset(&ds, &out)?;
    m.outputs.push(out.display().to_string());
    let mpath = m.finish_and_write(&out)?;
    ctx.emit(
        &format!(
            "generated {} sample(s) ({} users x {} characters x {} sessions x {} repetitions)\ndataset: {}\nmanifest: {}",
            ds.len(),
            cfg.n_users,
            cfg.characters.len(),
            cfg.sessions,
            cfg.samples_per_cell,
            out.display(),
            mpath.display()
        ),
        serde_json::json!({
            "samples": ds.len(),
            "digest": ds.provenance.content_digest,
            "dataset": out,
            "manifest": mpath,
        }),
    );
    Ok(())
}

fn cmd_train(ctx: &Ctx, a: TrainArgs) -> Result<()> {
    let mut m = RunManifest::start("train");
    let mut job: TrainJob = match &a.config {
        Some(p) => read_json(&ctx.path(p))?,
        None => TrainJob::default(),
    };
    if let Some(e) = a.epochs {
        job.train.epochs = e;
    }
    if let Some(lr) = a.learning_rate {
        job.train.learning_rate = lr;
    }
    match a.pairing {
        Some(PairingArg::Linear) => job.pairing = Pairing::Linear,
        Some(PairingArg::Aligned) if job.pairing == Pairing::Linear => {
            job.pairing = Pairing::aligned()
        }
        _ => {}
    }
    job.pairs.seed = a.seed;
    m.set_config(&job);
    m.seed = Some(a.seed);

    let ds_path = ctx.path(&a.dataset);
    let ds = load_dataset(&ds_path)?;
    m.add_input(&ds_path)?;
    let split = make_split(&ds, &job.split, a.seed)?;
    if split.train.is_empty() {
        bail!("the split leaves no training users");
    }
    let train_s = prepare_dataset(&ds, Some(&split.train), job.resample_rate_hz)?;
    let val_s = prepare_dataset(&ds, Some(&split.val), job.resample_rate_hz)?;
    let train_p = build_training_pairs(&train_s, &job.pairing, &job.pairs)?;
    let val_p = if val_s.is_empty() {
        vec![]
    } else {
        build_training_pairs(
            &val_s,
            &job.pairing,
            &PairPlan {
                seed: job.pairs.seed ^ 0xA5A5,
                ..job.pairs.clone()
            },
        )?
    };
    log::info!(
        "{} training pairs, {} validation pairs",
        train_p.len(),
        val_p.len()
    );

    let state = match &a.resume {
        Some(p) => {
            let p = ctx.path(p);
            m.add_input(&p)?;
            checkpoint::load_state(&p)?
        }
        None => TrainState::fresh(SiameseModel::new(job.arch, a.seed, job.train.init_std)),
    };
    let start_epoch = state.model.epochs_trained;
    let outcome = train_from(state, &train_p, &val_p, &job.train)?;
    let out = ctx.path(&a.checkpoint_out);
    if let Some(dir) = out.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir)?;
    }
    // The main checkpoint holds the last epoch with optimizer state, so a
    // resumed run continues the epoch counter; the best-validation model
    // goes next to it.
    checkpoint::save(&out, &outcome.last.model, Some(&outcome.last.adam))?;
    let best_path = out.with_extension("best.ckpt");
    checkpoint::save(&best_path, &outcome.best.model, None)?;
    let log_path = a
        .log_out
        .map(|p| ctx.path(&p))
        .unwrap_or_else(|| out.with_extension("log.json"));
    std::fs::write(&log_path, serde_json::to_string_pretty(&outcome.log)?)?;
    m.outputs.extend([
        out.display().to_string(),
        best_path.display().to_string(),
        log_path.display().to_string(),
    ]);
    let mpath = m.finish_and_write(&out)?;
    let last = outcome.log.records.last();
    ctx.emit(
        &format!(
            "trained epochs {}..{} on {} pairs; best epoch {} (val loss {}, val EER {})\ncheckpoint: {}\nbest model: {}\nmanifest: {}",
            start_epoch + 1,
            outcome.last.model.epochs_trained,
            train_p.len(),
            outcome.log.best_epoch,
            outcome.log.best_val_loss.map_or("-".into(), |v| format!("{v:.4}")),
            outcome
                .log
                .records
                .iter()
                .find(|r| r.epoch == outcome.log.best_epoch)
                .and_then(|r| r.val_eer)
                .map_or("-".into(), |v| format!("{:.2}%", 100.0 * v)),
            out.display(),
            best_path.display(),
            mpath.display()
        ),
        serde_json::json!({
            "epochs_trained": outcome.last.model.epochs_trained,
            "best_epoch": outcome.log.best_epoch,
            "best_val_loss": outcome.log.best_val_loss,
            "last_train_loss": last.map(|r| r.train_loss),
            "checkpoint": out,
            "best_checkpoint": best_path,
            "manifest": mpath,
        }),
    );
    Ok(())
}

fn resolve_split(ctx: &Ctx, s: &str) -> Result<SplitSpec> {
    Ok(match s {
        "all" => SplitSpec::ById {
            dev: 0,
            eval: None,
            required_sessions: vec![],
            train_fraction: 0.8,
        },
        "ebiodigit" => SplitSpec::ebiodigit(),
        "mobiletouch" => SplitSpec::mobiletouch(),
        path => read_json(&ctx.path(Path::new(path)))?,
    })
}

fn cmd_eval(ctx: &Ctx, a: EvalArgs) -> Result<()> {
    let mut m = RunManifest::start("eval");
    let mut cfg = match &a.config {
        Some(p) => read_json(&ctx.path(p))?,
        None => ProtocolConfig::basic(a.scorer),
    };
    cfg.scorer = a.scorer;
    if let Some(z) = a.z {
        cfg.enroll_count = z;
    }
    if let Some(s) = a.enroll_sessions.clone() {
        cfg.enroll_sessions = s;
    }
    if let Some(t) = a.test_session {
        cfg.test_session = t;
    }
    if a.allow_session_overlap {
        cfg.allow_session_overlap = true;
    }
    if let Some(l) = &a.password_lengths {
        cfg.password_lengths = parse_lengths(l)?;
    }
    if let Some(p) = a.password.clone() {
        cfg.password = p;
    }
    if let Some(s) = &a.split {
        cfg.split = resolve_split(ctx, s)?;
    }
    if let Some(s) = a.seed {
        cfg.seed = s;
    }
    if a.seeded_impostors {
        cfg.impostor_pick = ImpostorPick::Seeded;
    }
    m.set_config(&cfg);
    m.seed = Some(cfg.seed);

    let ds_path = ctx.path(&a.dataset);
    let ds = load_dataset(&ds_path)?;
    m.add_input(&ds_path)?;
    let model = match &a.checkpoint {
        Some(p) if a.scorer.needs_model() => {
            let p = ctx.path(p);
            m.add_input(&p)?;
            Some(Arc::new(checkpoint::load(&p)?.0))
        }
        _ => None,
    };
    let scorer = Scorer::build(a.scorer, model)?;
    let report = run_protocol(&ds, &scorer, &cfg)?;
    let out = ctx.path(&a.report_out);
    if let Some(dir) = out.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir)?;
    }
    std::fs::write(&out, report.to_json())?;
    m.outputs.push(out.display().to_string());
    if let Some(c) = &a.csv_out {
        let c = ctx.path(c);
        std::fs::write(&c, report.to_csv())?;
        m.outputs.push(c.display().to_string());
    }
    let mpath = m.finish_and_write(&out)?;

    let mut text = format!(
        "scorer {}: {} evaluation users, average per-character EER {:.2}%\n",
        report.scorer,
        report.eval_users.len(),
        100.0 * report.average_eer
    );
    for c in &report.characters {
        text.push_str(&format!("  {:>4}  {:6.2}%\n", c.label, 100.0 * c.eer));
    }
    for f in &report.fused {
        text.push_str(&format!(
            "  fused {} [{}]: {:.2}%\n",
            f.length,
            f.characters.join(" "),
            100.0 * f.eer
        ));
    }
    text.push_str(&format!(
        "report: {}\nmanifest: {}",
        out.display(),
        mpath.display()
    ));
    ctx.emit(
        &text,
        serde_json::json!({
            "scorer": report.scorer,
            "average_eer": report.average_eer,
            "per_character": report.characters.iter().map(|c| (c.label.clone(), c.eer)).collect::<Vec<_>>(),
            "fused": report.fused.iter().map(|f| (f.length, f.eer)).collect::<Vec<_>>(),
            "report": out,
            "manifest": mpath,
        }),
    );
    Ok(())
}

fn cmd_serve(ctx: &Ctx, a: ServeArgs) -> Result<()> {
    use drawpass_service::{AppState, Calibration, JsonFileStore, MemoryStore, ServiceConfig};
    let model = match &a.checkpoint {
        Some(p) => Some(checkpoint::load(&ctx.path(p))?.0),
        None => None,
    };
    let model_id = match &a.checkpoint {
        Some(p) => file_digest(&ctx.path(p))?,
        None => "none".into(),
    };
    let scorer = Scorer::build(a.scorer, model.map(Arc::new))?;
    let mut calibration = match &a.calibration {
        Some(p) => Calibration::from_file(&ctx.path(p), a.calibration_length)
            .map_err(anyhow::Error::msg)?,
        None => Calibration {
            threshold: 0.0,
            far: f64::NAN,
            frr: f64::NAN,
            eer: f64::NAN,
        },
    };
    if let Some(t) = a.threshold {
        calibration.threshold = t;
    } else if a.calibration.is_none() {
        bail!("either --threshold or --calibration is required");
    }
    let mut cfg = ServiceConfig::new(scorer, calibration);
    cfg.enroll_count = a.z.max(1);
    cfg.model_id = model_id;
    cfg.alphabet = a.alphabet.unwrap_or_default();
    cfg.debug_store_attempts = a.debug_store_attempts;
    let store: Box<dyn drawpass_service::EnrollmentStore> = match &a.store {
        Some(p) => Box::new(JsonFileStore::open(&ctx.path(p))?),
        None => Box::new(MemoryStore::new()),
    };
    let addr: std::net::SocketAddr = format!("{}:{}", a.host, a.port)
        .parse()
        .context("bad listen address")?;
    let rt = tokio::runtime::Runtime::new()?;
    if !ctx.json {
        println!("serving on http://{addr}/api");
    }
    rt.block_on(drawpass_service::serve(addr, AppState::new(cfg, store)))?;
    Ok(())
}
