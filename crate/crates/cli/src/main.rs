//! `citelink` command-line front end.
//!
//! Exit codes: 0 on success, 1 for unreadable or invalid input data, 2 for
//! configuration problems.

mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use citelink::blocking::Strategy;
use citelink::classify::ClassifierKind;
use citelink::config::PipelineConfig;
use citelink::features::FeatureSchema;

/// A failed command, classified by exit code.
#[derive(Debug)]
pub enum Failure {
    Input(anyhow::Error),
    Config(anyhow::Error),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Input(_) => 1,
            Failure::Config(_) => 2,
        }
    }
}

pub type Outcome<T = ()> = Result<T, Failure>;

/// Tags an error with the exit code it should produce.
pub trait Classify<T> {
    fn input(self) -> Outcome<T>;
    fn config(self) -> Outcome<T>;
}

impl<T, E: Into<anyhow::Error>> Classify<T> for Result<T, E> {
    fn input(self) -> Outcome<T> {
        self.map_err(|e| Failure::Input(e.into()))
    }

    fn config(self) -> Outcome<T> {
        self.map_err(|e| Failure::Config(e.into()))
    }
}

#[derive(Debug, Parser)]
#[command(name = "citelink", version, about = "Match segmented references against a bibliographic database")]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
pub struct Global {
    /// JSON configuration file; flags below override its values.
    #[arg(long, short, global = true)]
    config: Option<PathBuf>,
    /// Worker threads for parallel stages.
    #[arg(long, global = true, env = "CITELINK_WORKERS")]
    workers: Option<usize>,
    /// Increase log verbosity.
    #[arg(long, short, global = true, action = clap::ArgAction::Count)]
    verbose: u8,

    #[arg(long, global = true)]
    records: Option<PathBuf>,
    #[arg(long, global = true)]
    references: Option<PathBuf>,
    #[arg(long, global = true)]
    gold: Option<PathBuf>,
    #[arg(long, global = true)]
    index: Option<PathBuf>,
    /// Model file written by `train` and read by `match`.
    #[arg(long, global = true)]
    model: Option<PathBuf>,
    /// Directory for generated artifacts.
    #[arg(long, short, global = true)]
    outputs: Option<PathBuf>,

    #[arg(long, global = true)]
    strategy: Option<String>,
    #[arg(long, global = true)]
    cutoff: Option<usize>,
    /// Feature groups, e.g. `A+P+B`.
    #[arg(long, global = true)]
    groups: Option<String>,
    #[arg(long, global = true)]
    classifier: Option<String>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[arg(long, global = true)]
    folds: Option<usize>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Build and persist the record index.
    Index,
    /// Retrieve candidate records for every reference.
    Block,
    /// Compute feature vectors for candidate pairs.
    Featurize {
        /// Do not attach gold labels even when a gold file is configured.
        #[arg(long)]
        unlabeled: bool,
    },
    /// Train a classifier on labeled pairs.
    Train,
    /// Apply a model and emit one link per matched reference.
    Match,
    /// Cross-validate the configured pipeline and write reports.
    Evaluate,
    /// Score the 63 segment combinations against the gold standard.
    Filter,
    /// Check a corpus against the data model.
    Validate,
    /// Convert an exported gold corpus into JSONL inputs.
    Convert {
        /// `id<TAB>tagged reference` lines.
        #[arg(long)]
        tagged_references: PathBuf,
        #[arg(long)]
        records_csv: PathBuf,
        #[arg(long)]
        gold_csv: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Generate a synthetic corpus.
    Synth {
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 42)]
        synth_seed: u64,
        #[arg(long)]
        n_records: Option<usize>,
        #[arg(long)]
        n_references: Option<usize>,
        #[arg(long)]
        n_matched: Option<usize>,
    },
}

impl Global {
    /// Loads the config file, if any, and applies flag overrides.
    fn resolve(&self) -> Outcome<PipelineConfig> {
        let mut config = match &self.config {
            Some(path) => PipelineConfig::load(path).config()?,
            None => PipelineConfig::default(),
        };
        let paths = &mut config.paths;
        for (flag, slot) in [
            (&self.records, &mut paths.records),
            (&self.references, &mut paths.references),
            (&self.gold, &mut paths.gold),
            (&self.index, &mut paths.index),
            (&self.model, &mut paths.models),
            (&self.outputs, &mut paths.outputs),
        ] {
            if flag.is_some() {
                slot.clone_from(flag);
            }
        }
        if let Some(s) = &self.strategy {
            config.blocking.strategy = s.parse::<Strategy>().config()?;
        }
        if let Some(c) = self.cutoff {
            config.blocking.cutoff = c;
        }
        if let Some(g) = &self.groups {
            config.features.groups = FeatureSchema::parse_groups(g).config()?.groups;
        }
        if let Some(k) = &self.classifier {
            config.classifier.kind = k.parse::<ClassifierKind>().config()?;
        }
        if let Some(s) = self.seed {
            config.classifier.seed = s;
            config.eval.seed = s;
        }
        if let Some(f) = self.folds {
            config.eval.folds = f;
        }
        config.validate().config()?;
        Ok(config)
    }
}

fn run(cli: Cli) -> Outcome {
    if let Some(n) = cli.global.workers {
        if n == 0 {
            return Err(Failure::Config(anyhow::anyhow!("worker count must be at least 1")));
        }
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global().config()?;
    }
    match cli.command {
        Command::Convert {
            tagged_references,
            records_csv,
            gold_csv,
            out,
        } => commands::convert(&tagged_references, &records_csv, &gold_csv, &out),
        Command::Synth {
            out,
            synth_seed,
            n_records,
            n_references,
            n_matched,
        } => commands::synth(&out, synth_seed, n_records, n_references, n_matched),
        command => {
            let config = cli.global.resolve()?;
            match command {
                Command::Index => commands::index(&config),
                Command::Block => commands::block(&config),
                Command::Featurize { unlabeled } => commands::featurize(&config, unlabeled),
                Command::Train => commands::train(&config),
                Command::Match => commands::match_links(&config),
                Command::Evaluate => commands::evaluate(&config),
                Command::Filter => commands::filter(&config),
                Command::Validate => commands::validate(&config),
                Command::Convert { .. } | Command::Synth { .. } => unreachable!(),
            }
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.global.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(failure) => {
            let (Failure::Input(e) | Failure::Config(e)) = &failure;
            eprintln!("error: {e:#}");
            ExitCode::from(failure.code())
        }
    }
}
