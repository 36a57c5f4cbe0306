use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use log::info;

use zpsnn::config::RunConfig;
use zpsnn::corpus::{self, generate_synthetic, load_embeddings, parse_conll, Document, EmbeddingMatrix};
use zpsnn::model::{checkpoint, ContextWindow, ModelConfig};
use zpsnn::nn::GradCheckOptions;
use zpsnn::train::{self, report};
use zpsnn::Error;

/// Gradient checks pass when the worst relative error stays below this.
const GRADCHECK_TOLERANCE: f64 = 1e-4;

#[derive(Parser)]
#[command(name = "zpsnn", version, about = "Zero pronoun resolution network")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train a model and write a checkpoint.
    Train(Common),
    /// Evaluate a checkpoint on the evaluation corpus.
    Eval(Common),
    /// Retrain with full, global-only and local-only candidate
    /// representations and report each.
    Ablate(Common),
    /// Retrain per context window and report each.
    Sweep(Common),
    /// Compare backpropagated gradients with finite differences.
    Gradcheck(GradcheckArgs),
    /// Write a synthetic corpus in CoNLL format.
    GenCorpus(GenArgs),
}

#[derive(Args, Clone)]
struct Common {
    /// Flat `key = value` config file.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Training corpus (CoNLL).
    #[arg(long)]
    corpus: Option<PathBuf>,
    #[arg(long)]
    eval_corpus: Option<PathBuf>,
    /// Pretrained embeddings (text, `|V| d` header).
    #[arg(long)]
    embeddings: Option<PathBuf>,
    #[arg(long)]
    checkpoint: Option<PathBuf>,
    /// Output CSV report.
    #[arg(long)]
    report: Option<PathBuf>,
    /// Context window (`all` or a count); for `sweep`, a comma-separated list.
    #[arg(long)]
    window: Option<String>,
    /// full, local_only or global_only.
    #[arg(long)]
    ablation: Option<String>,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    lr: Option<f64>,
    /// Extra `key=value` overrides, applied last.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
}

#[derive(Args)]
struct GradcheckArgs {
    #[command(flatten)]
    common: Common,
    /// Range of the uniform initialization used for the check. Without
    /// `--config` the model uses compact widths; `--set` can change them.
    #[arg(long, default_value_t = 0.5)]
    init_range: f64,
    /// Entries sampled per parameter tensor.
    #[arg(long, default_value_t = 16)]
    entries: usize,
    #[arg(long, hide = true)]
    corrupt_gradient: bool,
}

#[derive(Args)]
struct GenArgs {
    #[command(flatten)]
    common: Common,
    /// Output CoNLL path.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    docs: Option<usize>,
    #[arg(long)]
    sentences: Option<usize>,
    #[arg(long)]
    vocab_size: Option<usize>,
    /// off, global or long_range.
    #[arg(long)]
    mode: Option<String>,
}

/// Failure with its exit status.
enum Failure {
    /// A check ran and did not pass.
    Check(String),
    Error(Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Error(e)
    }
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::NonFinite(_) => 3,
        _ => 2,
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info"))
        .format_timestamp(None)
        .init();
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Check(msg)) => {
            eprintln!("check failed: {msg}");
            ExitCode::from(1)
        }
        Err(Failure::Error(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}

fn run(cmd: Command) -> Result<(), Failure> {
    match cmd {
        Command::Train(c) => cmd_train(&c, false),
        Command::Eval(c) => cmd_train(&c, true),
        Command::Ablate(c) => cmd_ablate(&c),
        Command::Sweep(c) => cmd_sweep(&c),
        Command::Gradcheck(g) => cmd_gradcheck(&g),
        Command::GenCorpus(g) => cmd_gen(&g),
    }
}

/// `base` supplies values when no config file is given.
fn config(c: &Common, sweep: bool, base: RunConfig) -> zpsnn::Result<RunConfig> {
    let mut cfg = match &c.config {
        Some(p) => RunConfig::load(p)?,
        None => base,
    };
    let path = |p: &Option<PathBuf>| p.as_ref().map(|p| p.display().to_string());
    let flags = [
        ("seed", c.seed.map(|s| s.to_string())),
        ("train_corpus", path(&c.corpus)),
        ("eval_corpus", path(&c.eval_corpus)),
        ("embeddings", path(&c.embeddings)),
        ("checkpoint", path(&c.checkpoint)),
        ("report", path(&c.report)),
        (if sweep { "windows" } else { "context_window" }, c.window.clone()),
        ("ablation", c.ablation.clone()),
        ("epochs", c.epochs.map(|e| e.to_string())),
        ("lr", c.lr.map(|l| format!("{l:?}"))),
    ];
    for (k, v) in flags {
        if let Some(v) = v {
            cfg.set(k, &v)?;
        }
    }
    for o in &c.overrides {
        let (k, v) = o
            .split_once('=')
            .ok_or_else(|| Error::Config(format!("--set expects key=value, got `{o}`")))?;
        cfg.set(k.trim(), v.trim())?;
    }
    cfg.validate()?;
    cfg.check_inputs()?;
    Ok(cfg)
}

fn require<'a>(p: &'a Option<PathBuf>, key: &str) -> zpsnn::Result<&'a Path> {
    p.as_deref()
        .ok_or_else(|| Error::Config(format!("{key} is required (flag or config key `{key}`)")))
}

fn corpus_at(p: &Option<PathBuf>, key: &str) -> zpsnn::Result<Vec<Document>> {
    let path = require(p, key)?;
    parse_conll(path)
}

fn embeddings(cfg: &RunConfig) -> zpsnn::Result<Option<EmbeddingMatrix>> {
    cfg.embeddings
        .as_ref()
        .map(|p| load_embeddings(p, cfg.model.embedding_dim))
        .transpose()
}

fn emit(path: &Option<PathBuf>, text: &str) -> zpsnn::Result<()> {
    match path {
        Some(p) => {
            fs::write(p, text)?;
            info!("wrote {}", p.display());
        }
        None => print!("{text}"),
    }
    Ok(())
}

fn cmd_train(c: &Common, eval: bool) -> Result<(), Failure> {
    let cfg = config(c, false, RunConfig::default())?;
    if eval {
        return cmd_eval(&cfg);
    }
    let docs = corpus_at(&cfg.train_corpus, "train_corpus")?;
    let ckpt = require(&cfg.checkpoint, "checkpoint")?;
    let pretrained = embeddings(&cfg)?;
    let out = train::fit(&docs, &cfg.model, &cfg.hp, cfg.ablation, pretrained.as_ref())?;
    checkpoint::save(&out.params, ckpt)?;
    info!("wrote checkpoint {}", ckpt.display());
    emit(&cfg.report, &report::loss_log_csv(&out.epoch_losses))?;
    Ok(())
}

/// Shape-determining fields of two configs agree.
fn same_shape(a: &ModelConfig, b: &ModelConfig) -> bool {
    a.embedding_dim == b.embedding_dim
        && a.zp_hidden == b.zp_hidden
        && a.local_hidden == b.local_hidden
        && a.global_hidden == b.global_hidden
        && a.zp_combine == b.zp_combine
        && a.feature_dim == b.feature_dim
}

fn cmd_eval(cfg: &RunConfig) -> Result<(), Failure> {
    let ckpt = require(&cfg.checkpoint, "checkpoint")?;
    if !ckpt.exists() {
        return Err(Error::Config(format!("checkpoint: no such file {}", ckpt.display())).into());
    }
    let params = checkpoint::load(ckpt)?;
    if !same_shape(&params.config, &cfg.model) {
        return Err(Error::Config(format!(
            "checkpoint {} shapes {:?} do not match configured {:?}",
            ckpt.display(),
            params.config,
            cfg.model
        ))
        .into());
    }
    let path = cfg.eval_corpus.as_ref().or(cfg.train_corpus.as_ref()).cloned();
    let docs = corpus_at(&path, "eval_corpus")?;
    let m = train::evaluate_docs(&params, &docs, cfg.ablation)?;
    println!(
        "Overall R {:.1} P {:.1} F {:.1}",
        100.0 * m.recall(),
        100.0 * m.precision(),
        100.0 * m.f_score()
    );
    emit(&cfg.report, &report::metrics_csv(&m, cfg.ablation))?;
    Ok(())
}

fn cmd_ablate(c: &Common) -> Result<(), Failure> {
    let cfg = config(c, false, RunConfig::default())?;
    let train_docs = corpus_at(&cfg.train_corpus, "train_corpus")?;
    let eval_docs = corpus_at(&cfg.eval_corpus, "eval_corpus")?;
    let pretrained = embeddings(&cfg)?;
    let rows = train::ablation_study(&train_docs, &eval_docs, &cfg.model, &cfg.hp, pretrained.as_ref())?;
    emit(&cfg.report, &report::ablation_csv(&rows))?;
    Ok(())
}

fn cmd_sweep(c: &Common) -> Result<(), Failure> {
    let cfg = config(c, true, RunConfig::default())?;
    let train_docs = corpus_at(&cfg.train_corpus, "train_corpus")?;
    let eval_docs = corpus_at(&cfg.eval_corpus, "eval_corpus")?;
    let pretrained = embeddings(&cfg)?;
    let windows: &[ContextWindow] = &cfg.windows;
    let rows = train::window_sweep(
        &train_docs,
        &eval_docs,
        &cfg.model,
        &cfg.hp,
        windows,
        pretrained.as_ref(),
    )?;
    emit(&cfg.report, &report::sweep_csv(&rows))?;
    Ok(())
}

fn cmd_gradcheck(g: &GradcheckArgs) -> Result<(), Failure> {
    let cfg = config(
        &g.common,
        false,
        RunConfig {
            model: ModelConfig::compact(),
            ..RunConfig::default()
        },
    )?;
    let (docs, inst) = train::fixture_with_k(cfg.hp.seed, 3)?;
    let hp = train::Hyperparams {
        init_range: g.init_range,
        ..cfg.hp.clone()
    };
    let vocab = corpus::Vocab::from_documents(&docs);
    let mut params = train::init_params(&cfg.model, &hp, vocab, None)?;
    let opts = GradCheckOptions {
        entries_per_param: g.entries,
        seed: cfg.hp.seed,
        ..GradCheckOptions::default()
    };
    let r = train::check_gradients(&mut params, &docs, &inst, cfg.ablation, &opts, g.corrupt_gradient)?;
    println!(
        "max relative error {:.3e} at {}[{}] (analytic {:.6e}, numeric {:.6e}; {} entries)",
        r.max_rel_error, r.worst_param, r.worst_index, r.analytic, r.numeric, r.entries_checked
    );
    if r.max_rel_error < GRADCHECK_TOLERANCE {
        Ok(())
    } else {
        Err(Failure::Check(format!(
            "relative error {:.3e} >= {GRADCHECK_TOLERANCE:e} at {}",
            r.max_rel_error, r.worst_param
        )))
    }
}

fn cmd_gen(g: &GenArgs) -> Result<(), Failure> {
    let mut cfg = config(&g.common, false, RunConfig::default())?;
    let flags = [
        ("n_docs", g.docs.map(|v| v.to_string())),
        ("sentences_per_doc", g.sentences.map(|v| v.to_string())),
        ("vocab_size", g.vocab_size.map(|v| v.to_string())),
        ("distractor_mode", g.mode.clone()),
    ];
    for (k, v) in flags {
        if let Some(v) = v {
            cfg.set(k, &v)?;
        }
    }
    let out = require(&g.out, "out")?;
    let docs = generate_synthetic(cfg.hp.seed, &cfg.synth)?;
    fs::write(out, corpus::write_conll(&docs)).map_err(Error::from)?;
    info!("wrote {} documents to {}", docs.len(), out.display());
    Ok(())
}
