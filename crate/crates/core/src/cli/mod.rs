//! The `ecg-tinynet` command line.

mod commands;
mod errors;

pub use errors::CliError;

use std::path::PathBuf;

use clap::{Parser, Subcommand};

use crate::model::Variant;

#[derive(Debug, Parser)]
#[command(name = "ecg-tinynet", version, about = "Train, evaluate and serve a compact ECG arrhythmia classifier")]
pub struct Cli {
    /// TOML config with [data], [preprocess], [model], [train] and [eval] sections.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Overrides train.seed.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Parent directory for run directories.
    #[arg(long, global = true, env = "ECG_TINYNET_RUN_DIR")]
    pub run_dir: Option<PathBuf>,
    /// 12 for all leads, 1 for Lead I only.
    #[arg(long, global = true, value_parser = parse_leads)]
    pub leads: Option<usize>,
    /// cnn, cnn_attention, cnn_bilstm or full.
    #[arg(long, global = true)]
    pub variant: Option<Variant>,
    #[command(subcommand)]
    pub command: Command,
}

fn parse_leads(s: &str) -> Result<usize, String> {
    match s {
        "12" => Ok(12),
        "1" => Ok(1),
        _ => Err(format!("--leads must be 12 or 1, got {s}")),
    }
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Write synthetic header/payload pairs for trying the pipeline out.
    Synth {
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 10)]
        per_class: usize,
        /// Comma-separated class abbreviations; all classes when omitted.
        #[arg(long)]
        classes: Option<String>,
        #[arg(long, default_value_t = 10.0)]
        duration: f64,
        #[arg(long, default_value_t = 500)]
        fs: u32,
        /// int16 (.dat) or f32 (.f32)
        #[arg(long, default_value = "int16")]
        encoding: String,
    },
    /// Scan the data directory, write the manifest, skip report and splits.
    Ingest,
    /// Run the preprocessing pipeline and fill the cache.
    Preprocess,
    /// Train on the hold-out split and evaluate the best checkpoint on test.
    Train,
    /// Evaluate a weights archive on one split.
    Eval {
        #[arg(long)]
        weights: PathBuf,
        /// train, val, test or all
        #[arg(long, default_value = "test")]
        split: String,
    },
    /// k-fold cross-validation.
    Crossval,
    /// Print the top classes for recordings (.hea) or cache files (.ecgs).
    Infer {
        #[arg(long)]
        weights: PathBuf,
        #[arg(required = true)]
        inputs: Vec<PathBuf>,
        #[arg(long, default_value_t = 3)]
        top_k: usize,
    },
    /// Train and evaluate all four architecture variants.
    Ablate,
    /// Measure single-sample inference latency and memory.
    Bench {
        #[arg(long)]
        weights: PathBuf,
        #[arg(long)]
        input: PathBuf,
        #[arg(long, default_value_t = 100)]
        runs: usize,
    },
    /// Dump a weights archive as JSON (config plus named tensors).
    Export {
        #[arg(long)]
        weights: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
}

/// Parse `args` and run; returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { CliError::Config(String::new()).code() } else { 0 };
        }
    };
    match commands::dispatch(&cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.code()
        }
    }
}
