//! Command-line front end: corpus synthesis, parsing, training, evaluation,
//! ablation, extraction, integration and gradient checking.

mod commands;
mod run;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Parser, Debug)]
#[command(name = "html-lstm", version, about = "Information extraction from HTML tables with a tree-structured LSTM")]
struct Cli {
    #[command(flatten)]
    global: GlobalArgs,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Clone)]
pub struct GlobalArgs {
    /// Flat `key = value` config file.
    #[arg(long, global = true, value_name = "PATH")]
    pub config: Option<PathBuf>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Run directory for artifacts and the resolved config.
    #[arg(long, global = true, value_name = "DIR", default_value = "run")]
    pub out: PathBuf,
    /// Score threshold of multi-value extraction.
    #[arg(long, global = true)]
    pub threshold: Option<f64>,
    #[arg(long, global = true, value_enum)]
    pub mode: Option<ModeArg>,
    #[arg(long, global = true, value_enum)]
    pub variant: Option<VariantArg>,
    #[arg(long, global = true, value_enum)]
    pub downward_cell: Option<DownwardCellArg>,
    #[arg(long, global = true, value_enum)]
    pub seed_mode: Option<SeedModeArg>,
    /// Override one config key (repeatable).
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    pub set: Vec<String>,
    /// More logging (-v info, -vv debug).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    pub verbose: u8,
}

#[derive(ValueEnum, Debug, Clone, Copy)]
pub enum ModeArg {
    Single,
    Multi,
}

#[derive(ValueEnum, Debug, Clone, Copy)]
pub enum VariantArg {
    Upward,
    Full,
    #[value(name = "full+aug")]
    FullAug,
}

#[derive(ValueEnum, Debug, Clone, Copy)]
pub enum DownwardCellArg {
    Perchild,
    Summed,
}

#[derive(ValueEnum, Debug, Clone, Copy)]
pub enum SeedModeArg {
    UpwardRoot,
    Zero,
}

#[derive(ValueEnum, Debug, Clone, Copy)]
pub enum ProtocolArg {
    Holdout,
    Cv,
}

#[derive(ValueEnum, Debug, Clone, Copy)]
pub enum FormatArg {
    Csv,
    Jsonl,
    Html,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Generate a labeled synthetic corpus.
    Synth {
        #[arg(long, default_value_t = 200)]
        n: usize,
        /// Draw every attribute's values from one shared distribution.
        #[arg(long)]
        structure_only: bool,
    },
    /// Parse a corpus (.jsonl) or an HTML page and dump one tree per table.
    Parse { input: PathBuf },
    /// Train a model on a corpus.
    Train {
        #[arg(long)]
        corpus: PathBuf,
        /// Hold out whole sources (config `test_fraction`) and score them.
        #[arg(long)]
        holdout: bool,
    },
    /// Score a model on a labeled corpus.
    Evaluate {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        corpus: PathBuf,
    },
    /// Train the upward-only, full and full+aug variants and compare them.
    Ablate {
        #[arg(long)]
        corpus: PathBuf,
        /// Comma-separated training seeds.
        #[arg(long, value_delimiter = ',', default_value = "1,2,3")]
        seeds: Vec<u64>,
        #[arg(long, value_enum, default_value = "holdout")]
        protocol: ProtocolArg,
    },
    /// Classify every node of a corpus (.jsonl) or HTML page.
    Extract {
        #[arg(long)]
        model: PathBuf,
        input: PathBuf,
    },
    /// Build the unified table from extraction predictions.
    Integrate {
        #[arg(long)]
        predictions: PathBuf,
        #[arg(long)]
        model: PathBuf,
        /// Comma-separated attributes; defaults to the model's classes.
        #[arg(long, value_delimiter = ',')]
        schema: Option<Vec<String>>,
        #[arg(long, value_enum, default_value = "csv")]
        format: FormatArg,
    },
    /// Compare model gradients with finite differences.
    Gradcheck {
        #[arg(long, default_value_t = 5)]
        trees: usize,
        #[arg(long, default_value_t = 12)]
        max_nodes: usize,
    },
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    let level = match cli.global.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match commands::dispatch(cli.command, &cli.global) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
