use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use robustq_cli::commands::{
    cmd_backtest, cmd_eval, cmd_ingest, cmd_solve, cmd_train, BacktestArgs, EvalArgs, IngestArgs,
    SolveArgs, TrainArgs,
};

#[derive(Parser)]
#[command(name = "robustq", version, about = "Distributionally robust tabular Q-learning")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run robust Q-learning on the problem in a run config.
    Train {
        config: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        /// Comma-separated seeds; each run goes to `<out>/seed-<n>/`.
        #[arg(long, value_delimiter = ',', conflicts_with = "seed")]
        seeds: Vec<u64>,
        #[arg(long)]
        iterations: Option<u64>,
        /// Solve for Q* first and log the sup-norm gap at every checkpoint.
        #[arg(long)]
        oracle: bool,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        jobs: Option<usize>,
    },
    /// Compute the robust optimal Q table by value iteration.
    Solve {
        config: PathBuf,
        #[arg(long)]
        tol: Option<f64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Score coin-toss policies under true head probabilities.
    Eval {
        /// `NAME=PATH` or `PATH` to a policy.csv. Repeatable.
        #[arg(long = "policy", required = true)]
        policies: Vec<String>,
        /// Run config whose `[eval]` section fills in unset flags.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Comma-separated; defaults to 0.1,0.2,...,0.9.
        #[arg(long, value_delimiter = ',')]
        p_true: Vec<f64>,
        /// Defaults to 100000.
        #[arg(long)]
        rounds: Option<u64>,
        #[arg(long)]
        seed: Option<u64>,
        /// Closed-form expectation instead of simulation.
        #[arg(long)]
        exact: bool,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        jobs: Option<usize>,
    },
    /// Replay policies over a sign series.
    Backtest {
        #[arg(long = "policy")]
        policies: Vec<String>,
        #[arg(long)]
        trend_following: bool,
        #[arg(long)]
        buy_and_hold: bool,
        #[arg(long)]
        series: PathBuf,
        #[arg(long, default_value_t = 5)]
        h: usize,
        /// `label:start:end`, inclusive dates. Repeatable.
        #[arg(long = "period")]
        periods: Vec<String>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Convert a `date,price` CSV into a sign series.
    Ingest {
        prices: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        instrument: Option<String>,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Train { config, seed, seeds, iterations, oracle, out, jobs } => {
            cmd_train(&TrainArgs { config, seed, seeds, iterations, oracle, out, jobs })
        }
        Command::Solve { config, tol, out } => cmd_solve(&SolveArgs { config, tol, out }),
        Command::Eval { policies, config, p_true, rounds, seed, exact, out, jobs } => {
            cmd_eval(&EvalArgs { policies, config, p_true, rounds, seed, exact, out, jobs })
        }
        Command::Backtest { policies, trend_following, buy_and_hold, series, h, periods, out } => {
            cmd_backtest(&BacktestArgs { policies, trend_following, buy_and_hold, series, h, periods, out })
        }
        Command::Ingest { prices, out, instrument } => {
            cmd_ingest(&IngestArgs { prices, out, instrument })
        }
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
