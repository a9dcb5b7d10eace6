//! Argument parsing and dispatch for the `coordprop` binary.

use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};
use coordprop::propaganda::{
    load_lexicon, load_training_corpus, write_training_corpus, PropagandaModel, TrainerConfig,
};
use coordprop::synth::{generate, training_corpus, ScenarioConfig};

use crate::config::{PipelineConfig, CONFIG_ENV};
use crate::pipeline::{run_pipeline, run_stage, Stage, StageError};

#[derive(Debug, Parser)]
#[command(
    name = "coordprop",
    version,
    about = "Coordinated communities and propaganda trends from Twitter data"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Load and validate the corpus, write summary counts.
    Ingest(Common),
    /// Superspreaders, co-retweet similarity network and its backbone.
    Network(Common),
    /// Louvain communities and coordination scores.
    Communities(Common),
    /// Train a classifier or score community texts.
    Propaganda {
        #[command(subcommand)]
        action: PropagandaAction,
    },
    /// Propaganda trends per measure, informativeness and frame trends.
    Trends(Common),
    /// Correlation table, delta statistics and plots.
    Report(Common),
    /// Run all stages, or stop after `--stage`.
    Run {
        #[arg(long, value_enum, default_value = "report")]
        stage: Stage,
        #[command(flatten)]
        common: Common,
    },
    /// Generate a synthetic corpus with planted communities.
    Synth(SynthArgs),
}

#[derive(Debug, Subcommand)]
pub enum PropagandaAction {
    /// Fit a classifier on a labeled JSONL corpus and save it to `--model`.
    Train(Common),
    /// Score member tweet chunks and shared articles.
    Score(Common),
}

#[derive(Debug, Clone, Default, Args)]
pub struct Common {
    /// TOML configuration file.
    #[arg(long, env = CONFIG_ENV)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub tweets: Option<PathBuf>,
    #[arg(long)]
    pub articles: Option<PathBuf>,
    #[arg(long)]
    pub signals: Option<PathBuf>,
    /// Lexicon file (one term per line); repeatable.
    #[arg(long = "lexicon")]
    pub lexicons: Vec<PathBuf>,
    #[arg(long)]
    pub model: Option<PathBuf>,
    /// Labeled JSONL corpus used when no model exists.
    #[arg(long)]
    pub training: Option<PathBuf>,
    #[arg(long, short)]
    pub output: Option<PathBuf>,
    #[arg(long)]
    pub superspreader_fraction: Option<f64>,
    #[arg(long)]
    pub alpha: Option<f64>,
    #[arg(long)]
    pub resolution: Option<f64>,
    /// Louvain seed.
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub min_size: Option<usize>,
    #[arg(long)]
    pub lambda: Option<f64>,
    #[arg(long)]
    pub chunk_tokens: Option<usize>,
    /// Worker threads; results do not depend on this.
    #[arg(long)]
    pub threads: Option<usize>,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    /// Output directory for the scenario files.
    #[arg(long, short)]
    pub output: PathBuf,
    #[arg(long, default_value_t = 7)]
    pub seed: u64,
    /// Scenario overrides as a JSON file (fields of the scenario config).
    #[arg(long)]
    pub scenario: Option<PathBuf>,
    /// Size of the labeled training corpus written next to the scenario.
    #[arg(long, default_value_t = 1000)]
    pub training_size: usize,
}

impl Common {
    pub fn resolve(&self) -> Result<PipelineConfig> {
        let mut cfg = match &self.config {
            Some(path) => PipelineConfig::load(path)?,
            None => PipelineConfig::default(),
        };
        let p = &mut cfg.paths;
        set(&mut p.tweets, &self.tweets);
        set(&mut p.articles, &self.articles);
        set(&mut p.signals, &self.signals);
        set(&mut p.model, &self.model);
        set(&mut p.training, &self.training);
        if !self.lexicons.is_empty() {
            p.lexicons = self.lexicons.clone();
        }
        if let Some(o) = &self.output {
            p.output = o.clone();
        }
        override_with(&mut cfg.simnet.superspreader_fraction, self.superspreader_fraction);
        override_with(&mut cfg.simnet.alpha, self.alpha);
        override_with(&mut cfg.communities.resolution, self.resolution);
        override_with(&mut cfg.communities.seed, self.seed);
        override_with(&mut cfg.communities.min_size, self.min_size);
        override_with(&mut cfg.propaganda.lambda, self.lambda);
        override_with(&mut cfg.propaganda.chunk_tokens, self.chunk_tokens);
        cfg.validate()?;
        Ok(cfg)
    }
}

fn set(slot: &mut Option<PathBuf>, value: &Option<PathBuf>) {
    if value.is_some() {
        slot.clone_from(value);
    }
}

fn override_with<T>(slot: &mut T, value: Option<T>) {
    if let Some(v) = value {
        *slot = v;
    }
}

/// Exit status for an error: 2 for stage failures, 1 otherwise.
pub fn exit_code(err: &anyhow::Error) -> u8 {
    if err.downcast_ref::<StageError>().is_some() {
        2
    } else {
        1
    }
}

fn with_threads<T: Send>(threads: Option<usize>, f: impl FnOnce() -> T + Send) -> Result<T> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = threads {
        builder = builder.num_threads(n.max(1));
    }
    let pool = builder.build().context("building thread pool")?;
    Ok(pool.install(f))
}

pub fn execute(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Ingest(c) => stage(&c, Stage::Ingest),
        Command::Network(c) => stage(&c, Stage::Network),
        Command::Communities(c) => stage(&c, Stage::Communities),
        Command::Propaganda {
            action: PropagandaAction::Score(c),
        } => stage(&c, Stage::Propaganda),
        Command::Propaganda {
            action: PropagandaAction::Train(c),
        } => {
            let cfg = c.resolve()?;
            with_threads(c.threads, || train(&cfg))?
        }
        Command::Trends(c) => stage(&c, Stage::Trends),
        Command::Report(c) => stage(&c, Stage::Report),
        Command::Run { stage, common } => {
            let cfg = common.resolve()?;
            with_threads(common.threads, || run_pipeline(&cfg, stage))??;
            Ok(())
        }
        Command::Synth(args) => synth(&args),
    }
}

fn stage(c: &Common, stage: Stage) -> Result<()> {
    let cfg = c.resolve()?;
    with_threads(c.threads, || run_stage(&cfg, stage))??;
    Ok(())
}

fn train(cfg: &PipelineConfig) -> Result<()> {
    let training = cfg
        .paths
        .training
        .as_deref()
        .context("no training corpus given (--training)")?;
    let model_path = cfg.paths.model.as_deref().context("no model path given (--model)")?;
    let items = load_training_corpus(training)?;
    let lexicons = cfg
        .paths
        .lexicons
        .iter()
        .map(|p| load_lexicon(p))
        .collect::<coordprop::Result<Vec<_>>>()?;
    let mut trainer = TrainerConfig {
        lexicons,
        seed: cfg.propaganda.seed,
        ..Default::default()
    };
    trainer.options.lambda = cfg.propaganda.lambda;
    trainer.options.max_iter = cfg.propaganda.max_iter;
    let model: PropagandaModel<f64> = PropagandaModel::train(&items, &trainer)?;
    if let Some(parent) = model_path.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent)?;
    }
    model.save(model_path)?;
    if let Some(r) = model.report() {
        eprintln!(
            "trained on {} items: {} iterations, loss {:.6}, converged {}",
            items.len(),
            r.iterations,
            r.loss,
            r.converged
        );
    }
    Ok(())
}

fn synth(args: &SynthArgs) -> Result<()> {
    let mut config = match &args.scenario {
        Some(path) => {
            let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
            serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?
        }
        None => ScenarioConfig::default(),
    };
    config.seed = args.seed;
    let scenario = generate(&config)?;
    scenario.write(&args.output)?;
    let training = args.output.join("training.jsonl");
    write_training_corpus(&training, &training_corpus(args.training_size, args.seed))?;
    write_config(&args.output)?;
    Ok(())
}

/// A config next to the generated files that `run --config` can use directly.
fn write_config(dir: &Path) -> Result<()> {
    let mut cfg = PipelineConfig::default();
    cfg.paths.tweets = Some("tweets.jsonl".into());
    cfg.paths.articles = Some("articles.jsonl".into());
    cfg.paths.signals = Some("signals.csv".into());
    cfg.paths.training = Some("training.jsonl".into());
    cfg.paths.output = "out".into();
    // Synthetic populations are small enough to keep every retweeting user.
    cfg.simnet.superspreader_fraction = 1.0;
    let path = dir.join("coordprop.toml");
    std::fs::write(&path, cfg.to_toml()).with_context(|| format!("writing {}", path.display()))
}
