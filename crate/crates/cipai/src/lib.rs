//! File formats, checkpoints and the `cipai` command line over
//! [`cipai_core`].

pub mod commands;
pub mod config;
pub mod data;
pub mod error;
pub mod formats;

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

pub use config::RunConfig;
pub use error::{CliError, ExitKind};

#[derive(Debug, Parser)]
#[command(
    name = "cipai",
    version,
    about = "Tune-constrained iambic generation with an attention encoder-decoder"
)]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalArgs,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct GlobalArgs {
    /// Config file of `key = value` lines; relative paths in it resolve
    /// against its directory.
    #[arg(long, short, global = true)]
    pub config: Option<PathBuf>,
    /// Override one config key; repeatable; applied after the file.
    #[arg(long = "set", value_name = "KEY=VALUE", global = true)]
    pub set: Vec<String>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Build the vocabulary and training pairs from the corpus.
    Ingest,
    /// Train skip-gram character vectors.
    PretrainEmbeddings,
    /// Train the encoder-decoder; writes the checkpoint and training log.
    Train {
        /// Overrides `max_epochs`.
        #[arg(long)]
        max_epochs: Option<usize>,
        /// Overrides `strategy` (fixV, adaptV or random).
        #[arg(long)]
        strategy: Option<String>,
    },
    /// Generate the rest of an iambic from its first line.
    Generate {
        /// First line of the iambic.
        #[arg(long)]
        cue: String,
        /// Tune name.
        #[arg(long)]
        tune: String,
        /// Overrides `n_best`.
        #[arg(long)]
        n_best: Option<usize>,
    },
    /// Check iambics against their tunes; exit 0 iff all comply.
    Validate {
        /// File of iambics in corpus format.
        #[arg(long)]
        file: PathBuf,
    },
    /// BLEU-2 of generations from held-out cues.
    Evaluate,
    /// Finite-difference gradient check of a toy model.
    GradCheck,
}

/// Defaults, then the config file, then `--set`, then subcommand flags.
pub fn resolve_config(cli: &Cli) -> Result<RunConfig, CliError> {
    let mut cfg = RunConfig::default();
    if let Some(path) = &cli.global.config {
        let text =
            data::read_text(path, "config").map_err(|e| CliError::usage(e.module, e.message))?;
        let base = path
            .parent()
            .filter(|d| !d.as_os_str().is_empty())
            .unwrap_or(Path::new("."));
        cfg.apply_text(&text, Some(base), &path.display().to_string())?;
    }
    for kv in &cli.global.set {
        cfg.apply_override(kv)?;
    }
    let mut flag = |key: &str, value: String| {
        cfg.set(key, &value, None)
            .map_err(|e| CliError::usage("config", e))
    };
    match &cli.command {
        Command::Train {
            max_epochs,
            strategy,
        } => {
            if let Some(v) = max_epochs {
                flag("max_epochs", v.to_string())?;
            }
            if let Some(v) = strategy {
                flag("strategy", v.clone())?;
            }
        }
        Command::Generate {
            n_best: Some(v), ..
        } => flag("n_best", v.to_string())?,
        _ => {}
    }
    Ok(cfg)
}

/// Parses `args`, prints the resolved config and runs the subcommand.
pub fn run<I, T>(args: I, out: &mut dyn Write) -> Result<(), CliError>
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            let _ = write!(out, "{e}");
            return Ok(());
        }
        Err(e) => return Err(CliError::usage("cli", e.to_string().trim_end())),
    };
    let cfg = resolve_config(&cli)?;
    writeln!(out, "# resolved config\n{}", cfg.render()).map_err(|e| CliError::data("cli", e))?;
    match &cli.command {
        Command::Ingest => commands::ingest(&cfg, out),
        Command::PretrainEmbeddings => commands::pretrain_embeddings(&cfg, out),
        Command::Train { .. } => commands::train_model(&cfg, out),
        Command::Generate { cue, tune, .. } => commands::generate_poem(&cfg, cue, tune, out),
        Command::Validate { file } => commands::validate(&cfg, file, out),
        Command::Evaluate => commands::evaluate(&cfg, out),
        Command::GradCheck => commands::grad_check(&cfg, out),
    }
}
