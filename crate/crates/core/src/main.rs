use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use occlusion_bench::cli::{
    cmd_extract_blanks, cmd_generate, cmd_report, cmd_score, CliError, CommandOutcome, ExtractOptions,
    GenerateOptions, ReportOptions, ScoreOptions,
};
use occlusion_bench::provider::{EMBED_URL_ENV, LM_URL_ENV};

#[derive(Parser)]
#[command(name = "occlusion-bench", version, about = "Occluded-document benchmark generation and scoring")]
struct Cli {
    /// Worker threads for per-page and per-blank work.
    #[arg(long, global = true, default_value_t = 1)]
    workers: usize,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Degrade, refine and rotate source pages.
    Generate {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Coverage level in percent (0.5, 1.0 or 1.5); standard classes only.
        #[arg(long)]
        level: Option<f64>,
    },
    /// Find blank regions and write fill-mask prompts.
    ExtractBlanks {
        #[arg(long)]
        ocr: PathBuf,
        #[arg(long)]
        patches: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Score predictions with UCSM.
    Score {
        #[arg(long)]
        predictions: PathBuf,
        #[arg(long)]
        blanks: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, env = EMBED_URL_ENV)]
        embed_url: Option<String>,
        #[arg(long, env = LM_URL_ENV)]
        lm_url: Option<String>,
        /// Ignore provider URLs and use the default component values.
        #[arg(long)]
        offline: bool,
    },
    /// Tabulate SSIM and UCSM per degradation type.
    Report {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
}

fn run(cli: Cli) -> Result<CommandOutcome, CliError> {
    let workers = cli.workers;
    match cli.command {
        Command::Generate { config, seed, out, level } => {
            cmd_generate(&GenerateOptions { config, seed, out, level, workers })
        }
        Command::ExtractBlanks { ocr, patches, out } => cmd_extract_blanks(&ExtractOptions { ocr, patches, out }),
        Command::Score { predictions, blanks, out, embed_url, lm_url, offline } => cmd_score(&ScoreOptions {
            predictions,
            blanks,
            out,
            embed_url,
            lm_url,
            offline,
            workers,
            ..Default::default()
        }),
        Command::Report { config, out } => cmd_report(&ReportOptions { config, out, workers }),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match run(Cli::parse()) {
        Ok(outcome) => {
            for e in &outcome.errors {
                eprintln!("error: {}: {}", e.item, e.message);
            }
            ExitCode::from(outcome.exit_code() as u8)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
