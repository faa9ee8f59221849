//! `attn`: generate and classify trial corpora, evolve agents, evaluate and
//! trace them.
//!
//! Exit status: 0 success, 1 usage/config/runtime error, 2 frequency audit
//! outside tolerance.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use thiserror::Error;

use attn_core::evolution::ShapingVariant;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config: {0}")]
    Config(String),
    #[error("{0}")]
    Input(String),
    #[error("frequency audit outside tolerance")]
    AuditFailed,
    #[error(transparent)]
    Trial(#[from] attn_core::TrialError),
    #[error(transparent)]
    Genome(#[from] attn_core::GenomeError),
    #[error(transparent)]
    Evolution(#[from] attn_core::EvolutionError),
    #[error(transparent)]
    Analysis(#[from] attn_core::analysis::AnalysisError),
    #[error(transparent)]
    World(#[from] attn_core::world::WorldError),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::AuditFailed => 2,
            _ => 1,
        }
    }
}

#[derive(Parser)]
#[command(name = "attn", version, about = "Two-object selective attention task: trials, evolution, analysis")]
struct Cli {
    /// TOML config file layered over the built-in defaults.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Worker threads (default: all cores). Results do not depend on it.
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Trial corpora.
    #[command(subcommand)]
    Trials(TrialsCmd),
    /// Run the shaped GA.
    Evolve(EvolveArgs),
    /// Evaluate or trace an evolved agent.
    #[command(subcommand)]
    Agent(AgentCmd),
}

#[derive(Subcommand)]
enum TrialsCmd {
    /// Generate a seeded random corpus.
    Gen {
        #[arg(long)]
        count: usize,
        #[arg(long)]
        seed: u64,
        /// Output file (default: <out-dir>/trials_<seed>_<count>.jsonl).
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        out_dir: Option<PathBuf>,
    },
    /// Label a corpus and audit the label frequencies.
    Classify {
        #[arg(long = "in")]
        input: PathBuf,
        /// Label file (default: <input stem>.labels.jsonl next to the input).
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum VariantArg {
    Standard,
    UnseenPassing,
}

impl From<VariantArg> for ShapingVariant {
    fn from(v: VariantArg) -> Self {
        match v {
            VariantArg::Standard => ShapingVariant::Standard,
            VariantArg::UnseenPassing => ShapingVariant::UnseenPassingAugmented,
        }
    }
}

#[derive(Args)]
struct EvolveArgs {
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    interneurons: Option<usize>,
    #[arg(long)]
    generations: Option<usize>,
    #[arg(long)]
    population: Option<usize>,
    #[arg(long, value_enum)]
    variant: Option<VariantArg>,
    #[arg(long)]
    out_dir: Option<PathBuf>,
    /// Checkpoint every K generations (0 disables).
    #[arg(long, default_value_t = 50)]
    checkpoint_every: usize,
    /// Continue from the checkpoint in the output directory.
    #[arg(long)]
    resume: bool,
    /// Stop after this many generations, leaving a resumable checkpoint.
    #[arg(long, hide = true)]
    stop_after: Option<usize>,
}

#[derive(Subcommand)]
enum AgentCmd {
    /// Per-category report over a corpus.
    Eval {
        #[arg(long)]
        genome: PathBuf,
        #[arg(long)]
        corpus: PathBuf,
        /// Expected interneuron count; a mismatch with the genome is an error.
        #[arg(long)]
        interneurons: Option<usize>,
        /// Also write the report as JSON lines.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Per-step trajectory of one trial as CSV.
    Trace {
        #[arg(long)]
        genome: PathBuf,
        /// Trial id; looked up in --corpus, or among the handpicked trials.
        #[arg(long)]
        trial: u64,
        #[arg(long)]
        corpus: Option<PathBuf>,
        /// Expected interneuron count; a mismatch with the genome is an error.
        #[arg(long)]
        interneurons: Option<usize>,
        /// Reflect the trial about the world's center line first.
        #[arg(long)]
        mirror: bool,
        #[arg(long)]
        out: PathBuf,
    },
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    let mut cfg = config::RunConfig::load(cli.config.as_deref())?;
    if cli.threads == Some(0) {
        return Err(CliError::Config("--threads must be positive".into()));
    }
    if let Some(n) = cli.threads {
        // sizes the global pool used by corpus generation and batch evaluation
        commands::init_thread_pool(n)?;
    }
    match cli.command {
        Command::Trials(TrialsCmd::Gen { count, seed, out, out_dir }) => {
            cfg.seed = seed;
            cfg.validate()?;
            let out = out.unwrap_or_else(|| cfg.resolve_out_dir(out_dir.as_deref()).join(format!("trials_{seed}_{count}.jsonl")));
            commands::trials_gen(&cfg, count, &out)
        }
        Command::Trials(TrialsCmd::Classify { input, out }) => commands::trials_classify(&input, out.as_deref()),
        Command::Evolve(a) => {
            if let Some(s) = a.seed {
                cfg.seed = s;
            }
            if let Some(h) = a.interneurons {
                cfg.evolution.interneurons = h;
            }
            if let Some(g) = a.generations {
                cfg.evolution.generations = g;
            }
            if let Some(p) = a.population {
                cfg.evolution.population_size = p;
            }
            if let Some(v) = a.variant {
                cfg.shaping.variant = v.into();
            }
            let out_dir = cfg.resolve_out_dir(a.out_dir.as_deref());
            let opts = attn_core::evolution::RunOptions {
                threads: cli.threads,
                out_dir: Some(out_dir),
                checkpoint_every: a.checkpoint_every,
                resume: a.resume,
                stop_after: a.stop_after,
            };
            commands::evolve(&cfg, &opts)
        }
        Command::Agent(AgentCmd::Eval { genome, corpus, interneurons, out }) => {
            if let Some(h) = interneurons {
                cfg.evolution.interneurons = h;
            }
            commands::agent_eval(&cfg, interneurons.is_some(), &genome, &corpus, out.as_deref())
        }
        Command::Agent(AgentCmd::Trace { genome, trial, corpus, interneurons, mirror, out }) => {
            if let Some(h) = interneurons {
                cfg.evolution.interneurons = h;
            }
            commands::agent_trace(&cfg, interneurons.is_some(), &genome, trial, corpus.as_deref(), mirror, &out)
        }
    }
}
