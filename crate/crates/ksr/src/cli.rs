use std::ffi::OsString;
use std::io::Write;
use std::path::PathBuf;

use clap::{Parser, Subcommand};

use crate::commands;
use crate::config::RunConfig;
use crate::error::{CliError, Result};

#[derive(Debug, Parser)]
#[command(name = "ksr", version, about = "Box-embedding structure reasoning over mined knowledge structures")]
pub struct Cli {
    /// TOML run configuration.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Overrides `seed` from the config.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Overrides `paths.out` from the config.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Overrides any config key, e.g. `--set train.lr=0.01`. Repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE", global = true)]
    pub overrides: Vec<String>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, Subcommand)]
pub enum Command {
    /// Mine knowledge structures from a corpus.
    Mine,
    /// Write an initial checkpoint, from contextual vectors when configured.
    InitEmbeddings,
    /// Train from a checkpoint.
    Train,
    /// Compare analytic gradients with finite differences.
    Gradcheck,
    /// Generate evaluation queries from a knowledge graph.
    GenQueries,
    /// Rank generated queries and report H@k and MRR.
    Eval,
}

impl Cli {
    pub fn effective_config(&self) -> Result<RunConfig> {
        let mut overrides = self.overrides.clone();
        if let Some(s) = self.seed {
            overrides.push(format!("seed={s}"));
        }
        if let Some(o) = &self.out {
            let o = o.to_str().ok_or_else(|| CliError::Usage("--out must be valid UTF-8".into()))?;
            overrides.push(format!("paths.out={}", toml::Value::String(o.to_owned())));
        }
        RunConfig::load(self.config.as_deref(), &overrides)
    }
}

pub fn execute(cli: &Cli, out: &mut dyn Write) -> Result<()> {
    let cfg = cli.effective_config()?;
    match cli.command {
        Command::Mine => commands::mine(&cfg, out),
        Command::InitEmbeddings => commands::init_embeddings(&cfg, out),
        Command::Train => commands::train_cmd(&cfg, out),
        Command::Gradcheck => commands::gradcheck(&cfg, out),
        Command::GenQueries => commands::gen_queries(&cfg, out),
        Command::Eval => commands::eval(&cfg, out),
    }
}

/// Parses `args` and runs the command, returning the process exit code.
/// Errors go to `err`.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let text = e.render().to_string();
            let _ = if code == 0 { out.write_all(text.as_bytes()) } else { err.write_all(text.as_bytes()) };
            return code;
        }
    };
    match execute(&cli, out) {
        Ok(()) => 0,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            e.exit_code()
        }
    }
}
