use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use cli::{commands, resolve, CliError};

/// Sequence-tagging toolkit: preprocessing, semi-supervised training,
/// tagging, span-F1 evaluation, and resource-cost reporting.
#[derive(Parser)]
#[command(name = "cvt", version, about)]
struct Cli {
    /// Single-threaded numerics for bit-reproducible runs (use
    /// --deterministic=false to allow data-parallel kernels).
    #[arg(long, global = true, default_value_t = true, action = clap::ArgAction::Set)]
    deterministic: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct ConfigArgs {
    /// JSON config file; omitted fields fall back to preset/defaults.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Override one config key, e.g. --set mode=supervised_only or
    /// --set train.base_lr=0.25; repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    sets: Vec<String>,
    /// Shorthand for --set seed=N.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Subcommand)]
enum Command {
    /// Build vocabularies and a corpus summary from the configured data.
    Preprocess(ConfigArgs),
    /// Train a tagger; writes manifest, logs, and checkpoints.
    Train(ConfigArgs),
    /// Tag one-sentence-per-line text with a trained checkpoint.
    Tag {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        input: PathBuf,
        /// Write predictions here instead of stdout.
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Score predictions against gold (both CoNLL format), or aggregate
    /// per-run report files.
    Eval {
        #[arg(long, required_unless_present = "runs", conflicts_with = "runs")]
        pred: Option<PathBuf>,
        #[arg(long, required_unless_present = "runs", conflicts_with = "runs")]
        gold: Option<PathBuf>,
        /// Write the structured report as JSON.
        #[arg(long)]
        report: Option<PathBuf>,
        /// Multi-run mode: JSON reports to aggregate into mean±std.
        #[arg(long, value_delimiter = ',', num_args = 1..)]
        runs: Vec<PathBuf>,
        /// Second run set to test significance against.
        #[arg(long = "baseline-runs", value_delimiter = ',', num_args = 1..)]
        baseline_runs: Vec<PathBuf>,
        #[arg(long, default_value = "permutation", value_parser = parse_method)]
        method: eval::Method,
        #[arg(long, default_value_t = false)]
        paired: bool,
        /// Resampling seed for the permutation test.
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Turn a power-sample CSV into an energy / CO2 / dollars row.
    CostReport {
        #[arg(long)]
        samples: PathBuf,
        /// Wall-clock hours the job ran.
        #[arg(long)]
        hours: f64,
        /// Hardware column text for the rendered row.
        #[arg(long, default_value = "unknown")]
        hardware: String,
        #[arg(long)]
        pue: Option<f64>,
        #[arg(long = "co2-factor")]
        co2_factor: Option<f64>,
        #[arg(long = "usd-per-hour")]
        usd_per_hour: Option<f64>,
        /// Write the structured report as JSON.
        #[arg(long)]
        json: Option<PathBuf>,
    },
}

fn parse_method(s: &str) -> Result<eval::Method, String> {
    match s {
        "welch_t" => Ok(eval::Method::WelchT),
        "permutation" => Ok(eval::Method::Permutation),
        other => Err(format!(
            "unknown method {other:?} (expected welch_t or permutation)"
        )),
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    ndiff::set_parallel(!cli.deterministic);
    match cli.command {
        Command::Preprocess(args) => {
            let cfg = resolve(args.config.as_deref(), &args.sets, args.seed)?;
            commands::preprocess(&cfg)
        }
        Command::Train(args) => {
            let cfg = resolve(args.config.as_deref(), &args.sets, args.seed)?;
            commands::train(cfg, cli.deterministic)
        }
        Command::Tag {
            checkpoint,
            input,
            output,
        } => commands::tag(&checkpoint, &input, output.as_deref()),
        Command::Eval {
            pred,
            gold,
            report,
            runs,
            baseline_runs,
            method,
            paired,
            seed,
        } => {
            if runs.is_empty() {
                commands::eval_files(
                    pred.as_deref().expect("clap enforces pred"),
                    gold.as_deref().expect("clap enforces gold"),
                    report.as_deref(),
                )
            } else {
                commands::eval_runs(&runs, &baseline_runs, method, paired, seed)
            }
        }
        Command::CostReport {
            samples,
            hours,
            hardware,
            pue,
            co2_factor,
            usd_per_hour,
            json,
        } => commands::cost_report(
            &samples,
            hours,
            &hardware,
            pue,
            co2_factor,
            usd_per_hour,
            json.as_deref(),
        ),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // clap's help/version output is a success, not a usage error.
            if e.use_stderr() {
                eprint!("{e}");
                return ExitCode::from(1);
            }
            print!("{e}");
            return ExitCode::SUCCESS;
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
