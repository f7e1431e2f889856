//! Subcommand implementations. Each returns `Ok` after writing its artifacts.

use std::path::{Path, PathBuf};

use robustq::env::{signs_from_prices, ReturnSeries};
use robustq::eval::{
    buy_and_hold_policy, compare_policies, trend_following_policy, Comparison, Evaluator,
    PolicyTable,
};
use robustq::par::{self, Execution};
use robustq::qlearn::{train, train_seeds, TrainResult};
use robustq::DiscountedProblem;
use serde::Serialize;

use crate::config::{resolve_out_dir, EvalSection, RunConfigFile};
use crate::error::{CliError, CliResult};
use crate::files::{
    format_label, read_policy, read_prices, read_series, write_json, write_policy, write_series,
    write_text, QTableFile,
};

#[derive(Debug, Clone, Default)]
pub struct TrainArgs {
    pub config: PathBuf,
    pub seed: Option<u64>,
    pub seeds: Vec<u64>,
    pub iterations: Option<u64>,
    pub oracle: bool,
    pub out: Option<PathBuf>,
    pub jobs: Option<usize>,
}

#[derive(Serialize)]
struct TrainSummary {
    seed: u64,
    iterations: u64,
    stability_window: usize,
    stable: bool,
    final_oracle_gap: Option<f64>,
    duration_secs: f64,
    visits: Vec<u64>,
    worst_case_counts: Vec<u64>,
    n_kernels: usize,
}

fn write_train_artifacts(
    dir: &Path,
    problem: &DiscountedProblem,
    result: &TrainResult,
    seed: u64,
    window: usize,
    with_oracle: bool,
) -> CliResult<()> {
    QTableFile {
        states: problem.states.clone(),
        actions: problem.actions.clone(),
        q: result.q.clone(),
    }
    .write(&dir.join("q_table.csv"))?;
    write_policy(&dir.join("policy.csv"), &problem.states, &problem.actions, &result.greedy_policy())?;

    let mut log = String::from("step,policy,q_sup\n");
    for c in &result.checkpoints {
        let actions: Vec<String> = c
            .policy
            .iter()
            .map(|&a| format_label(problem.actions.label(a)))
            .collect();
        log.push_str(&format!("{},{},{}\n", c.step, actions.join(" "), c.q_sup));
    }
    write_text(&dir.join("checkpoints.csv"), &log)?;

    if with_oracle {
        let mut trace = String::from("step,oracle_gap\n");
        for c in &result.checkpoints {
            if let Some(g) = c.oracle_gap {
                trace.push_str(&format!("{},{g}\n", c.step));
            }
        }
        write_text(&dir.join("oracle_gap.csv"), &trace)?;
    }

    write_json(
        &dir.join("train_summary.json"),
        &TrainSummary {
            seed,
            iterations: result.steps,
            stability_window: window,
            stable: result.is_stable(window),
            final_oracle_gap: result.checkpoints.last().and_then(|c| c.oracle_gap),
            duration_secs: result.duration.as_secs_f64(),
            visits: result.visits.clone(),
            worst_case_counts: result.worst_case_counts.clone(),
            n_kernels: result.n_kernels,
        },
    )
}

pub fn cmd_train(args: &TrainArgs) -> CliResult<()> {
    let cfg = RunConfigFile::load(&args.config)?;
    let problem = cfg.build_problem()?;
    let mut train_cfg = cfg.train_config()?;
    if let Some(seed) = args.seed {
        train_cfg.seed = seed;
    }
    if let Some(n) = args.iterations {
        train_cfg.iterations = n;
    }
    let oracle = if args.oracle {
        let vi = problem.robust_value_iteration(cfg.solve.tol, cfg.solve.max_iter)?;
        if !vi.converged {
            eprintln!("warning: oracle did not converge (residual {})", vi.residual);
        }
        Some(vi.q)
    } else {
        None
    };
    let out = cfg.output_dir(args.out.as_deref());
    let window = train_cfg.stability_window;

    if args.seeds.is_empty() {
        let result = train(&train_cfg, &problem, oracle.as_ref())?;
        write_train_artifacts(&out, &problem, &result, train_cfg.seed, window, args.oracle)?;
        report_run(&problem, &result, train_cfg.seed, window);
    } else {
        let results = par::with_jobs(args.jobs, || {
            train_seeds(&train_cfg, &problem, &args.seeds, oracle.as_ref(), Execution::Parallel)
        })?;
        for (seed, result) in args.seeds.iter().zip(&results) {
            let dir = out.join(format!("seed-{seed}"));
            write_train_artifacts(&dir, &problem, result, *seed, window, args.oracle)?;
            report_run(&problem, result, *seed, window);
        }
    }
    Ok(())
}

fn report_run(problem: &DiscountedProblem, result: &TrainResult, seed: u64, window: usize) {
    let actions: Vec<String> = result
        .greedy_policy()
        .iter()
        .map(|&a| format_label(problem.actions.label(a)))
        .collect();
    println!(
        "seed {seed}: {} steps in {:.2?}, greedy [{}], stable={}",
        result.steps,
        result.duration,
        actions.join(" "),
        result.is_stable(window)
    );
}

#[derive(Debug, Clone, Default)]
pub struct SolveArgs {
    pub config: PathBuf,
    pub tol: Option<f64>,
    pub out: Option<PathBuf>,
}

#[derive(Serialize)]
struct SolveSummary {
    tol: f64,
    iterations: usize,
    residual: f64,
    converged: bool,
}

pub fn cmd_solve(args: &SolveArgs) -> CliResult<()> {
    let cfg = RunConfigFile::load(&args.config)?;
    let tol = args.tol.unwrap_or(cfg.solve.tol);
    if !(tol > 0.0) {
        return Err(CliError::user("--tol must be positive"));
    }
    let problem = cfg.build_problem()?;
    let vi = problem.robust_value_iteration(tol, cfg.solve.max_iter)?;
    if !vi.converged {
        eprintln!(
            "warning: not converged after {} iterations (residual {})",
            vi.iterations, vi.residual
        );
    }
    let out = cfg.output_dir(args.out.as_deref());
    QTableFile {
        states: problem.states.clone(),
        actions: problem.actions.clone(),
        q: vi.q.clone(),
    }
    .write(&out.join("qstar.csv"))?;
    write_policy(&out.join("policy.csv"), &problem.states, &problem.actions, &vi.q.greedy_policy())?;
    write_json(
        &out.join("solve_summary.json"),
        &SolveSummary {
            tol,
            iterations: vi.iterations,
            residual: vi.residual,
            converged: vi.converged,
        },
    )?;
    println!(
        "solved in {} iterations, residual {:e}, converged={}",
        vi.iterations, vi.residual, vi.converged
    );
    Ok(())
}

/// `NAME=PATH` or a bare path labeled by its file stem (or its directory for
/// `policy.csv`).
pub fn labeled_policy(spec: &str) -> CliResult<(String, PolicyTable)> {
    let (label, path) = match spec.split_once('=') {
        Some((l, p)) => (l.to_string(), PathBuf::from(p)),
        None => {
            let path = PathBuf::from(spec);
            let stem = path.file_stem().and_then(|s| s.to_str()).unwrap_or(spec);
            let label = match (stem, path.parent().and_then(|p| p.file_name())) {
                ("policy", Some(dir)) => dir.to_string_lossy().into_owned(),
                _ => stem.to_string(),
            };
            (label, path)
        }
    };
    Ok((label, read_policy(&path)?))
}

#[derive(Debug, Clone, Default)]
pub struct EvalArgs {
    pub policies: Vec<String>,
    /// Supplies `[eval]` defaults for the fields left unset below.
    pub config: Option<PathBuf>,
    pub p_true: Vec<f64>,
    pub rounds: Option<u64>,
    pub seed: Option<u64>,
    pub exact: bool,
    pub out: Option<PathBuf>,
    pub jobs: Option<usize>,
}

#[derive(Serialize)]
struct ProfitRow<'a> {
    policy: &'a str,
    p_true: f64,
    mode: &'static str,
    rounds: u64,
    cumulative_profit: f64,
    per_round_mean: f64,
    std_error: f64,
    seed: Option<u64>,
    best: bool,
}

fn comparison_json(cmp: &Comparison) -> serde_json::Value {
    serde_json::to_value(cmp).expect("serializable comparison")
}

pub fn cmd_eval(args: &EvalArgs) -> CliResult<()> {
    if args.policies.is_empty() {
        return Err(CliError::user("at least one --policy is required"));
    }
    let defaults = match &args.config {
        Some(path) => RunConfigFile::load(path)?.eval,
        None => EvalSection::default(),
    };
    let p_true = if args.p_true.is_empty() {
        defaults.p_true
    } else {
        args.p_true.clone()
    };
    let rounds = args.rounds.unwrap_or(defaults.rounds);
    let seed = args.seed.unwrap_or(defaults.seed);
    if rounds == 0 {
        return Err(CliError::user("--rounds must be at least 1"));
    }
    if let Some(p) = p_true.iter().find(|p| !(0.0..=1.0).contains(*p)) {
        return Err(CliError::user(format!("--p-true {p} is not in [0, 1]")));
    }
    let policies = args
        .policies
        .iter()
        .map(|s| labeled_policy(s))
        .collect::<CliResult<Vec<_>>>()?;
    for (label, p) in &policies {
        if p.len() != 11 {
            return Err(CliError::user(format!(
                "policy `{label}` has {} states; the coin toss has 11",
                p.len()
            )));
        }
    }
    let evaluator = if args.exact {
        Evaluator::CoinExact {
            p_true: p_true.clone(),
        }
    } else {
        Evaluator::CoinRollout {
            p_true: p_true.clone(),
            rounds,
            seed,
        }
    };
    let cmp = par::with_jobs(args.jobs, || compare_policies(&policies, &evaluator, Execution::Parallel))?;

    let n = rounds as f64;
    let mut rows = Vec::new();
    for (r, row) in cmp.rows.iter().enumerate() {
        for (c, &p) in p_true.iter().enumerate() {
            let (cumulative, mean, se, seed) = if args.exact {
                (row.values[c] * n, row.values[c], 0.0, None)
            } else {
                let cell = (r * p_true.len() + c) as u64;
                let cum = row.values[c];
                (cum, cum / n, row.std_errors[c].unwrap_or(0.0) / n, Some(seed.wrapping_add(cell)))
            };
            rows.push(ProfitRow {
                policy: &row.label,
                p_true: p,
                mode: if args.exact { "exact" } else { "rollout" },
                rounds,
                cumulative_profit: cumulative,
                per_round_mean: mean,
                std_error: se,
                seed,
                best: row.best[c],
            });
        }
    }
    let out = resolve_out_dir(args.out.as_deref());
    write_csv(&out.join("eval.csv"), &rows)?;
    write_json(&out.join("eval.json"), &comparison_json(&cmp))?;
    print_table(&cmp, |v| if args.exact { format!("{:.0}", v * n) } else { format!("{v:.0}") });
    Ok(())
}

fn write_csv<T: Serialize>(path: &Path, rows: &[T]) -> CliResult<()> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for row in rows {
        w.serialize(row).map_err(|e| CliError::io(path, e))?;
    }
    let bytes = w.into_inner().map_err(|e| CliError::io(path, e))?;
    write_text(path, &String::from_utf8(bytes).expect("utf-8 csv"))
}

fn print_table(cmp: &Comparison, fmt: impl Fn(f64) -> String) {
    println!("{:<16}{}", "", cmp.columns.iter().map(|c| format!("{c:>12}")).collect::<String>());
    for row in &cmp.rows {
        let cells: String = row
            .values
            .iter()
            .zip(&row.best)
            .map(|(v, b)| format!("{:>12}", format!("{}{}", fmt(*v), if *b { "*" } else { "" })))
            .collect();
        println!("{:<16}{cells}", row.label);
    }
}

#[derive(Debug, Clone, Default)]
pub struct BacktestArgs {
    pub policies: Vec<String>,
    pub trend_following: bool,
    pub buy_and_hold: bool,
    pub series: PathBuf,
    pub h: usize,
    /// `label:start:end` date windows; the whole series when empty.
    pub periods: Vec<String>,
    pub out: Option<PathBuf>,
}

#[derive(Serialize)]
struct BacktestRow<'a> {
    policy: &'a str,
    period: &'a str,
    start: String,
    end: String,
    trades: u64,
    mean_reward_per_trade: f64,
    cumulative_reward: f64,
    best: bool,
}

pub fn cmd_backtest(args: &BacktestArgs) -> CliResult<()> {
    if args.h == 0 || args.h > 20 {
        return Err(CliError::user(format!("--h {} is not in 1..=20", args.h)));
    }
    let series = read_series(&args.series)?;
    let periods: Vec<(String, ReturnSeries)> = if args.periods.is_empty() {
        vec![("all".to_string(), series)]
    } else {
        args.periods
            .iter()
            .map(|spec| {
                let parts: Vec<&str> = spec.splitn(3, ':').collect();
                if parts.len() != 3 {
                    return Err(CliError::user(format!("--period `{spec}` is not label:start:end")));
                }
                let s = series
                    .between(parts[1], parts[2])
                    .map_err(|e| CliError::user(format!("--period `{spec}`: {e}")))?;
                Ok((parts[0].to_string(), s))
            })
            .collect::<CliResult<_>>()?
    };
    for (label, s) in &periods {
        if s.len() <= args.h {
            return Err(CliError::user(format!(
                "period `{label}` has {} signs; need more than h = {}",
                s.len(),
                args.h
            )));
        }
    }
    let mut policies = args
        .policies
        .iter()
        .map(|s| labeled_policy(s))
        .collect::<CliResult<Vec<_>>>()?;
    if args.trend_following {
        policies.push(("trend-following".into(), trend_following_policy(args.h)));
    }
    if args.buy_and_hold {
        policies.push(("buy-and-hold".into(), buy_and_hold_policy(args.h)));
    }
    if policies.is_empty() {
        return Err(CliError::user(
            "give --policy, --trend-following or --buy-and-hold",
        ));
    }
    for (label, p) in &policies {
        if p.len() != 1 << args.h {
            return Err(CliError::user(format!(
                "policy `{label}` has {} states; window {} needs {}",
                p.len(),
                args.h,
                1usize << args.h
            )));
        }
    }
    let evaluator = Evaluator::Backtest {
        periods: periods.clone(),
        h: args.h,
    };
    let cmp = compare_policies(&policies, &evaluator, Execution::Parallel)?;
    let mut rows = Vec::new();
    for row in &cmp.rows {
        for (c, (label, s)) in periods.iter().enumerate() {
            let cum = row.values[c] * (s.len() - args.h) as f64;
            let (start, end) = s
                .date_range()
                .map(|(a, b)| (a.to_string(), b.to_string()))
                .unwrap_or_default();
            rows.push(BacktestRow {
                policy: &row.label,
                period: label,
                start,
                end,
                trades: (s.len() - args.h) as u64,
                mean_reward_per_trade: row.values[c],
                cumulative_reward: cum.round(),
                best: row.best[c],
            });
        }
    }
    let out = resolve_out_dir(args.out.as_deref());
    write_csv(&out.join("backtest.csv"), &rows)?;
    write_json(&out.join("backtest.json"), &comparison_json(&cmp))?;
    print_table(&cmp, |v| format!("{v:.4}"));
    Ok(())
}

#[derive(Debug, Clone, Default)]
pub struct IngestArgs {
    pub prices: PathBuf,
    pub out: PathBuf,
    pub instrument: Option<String>,
}

pub fn cmd_ingest(args: &IngestArgs) -> CliResult<()> {
    let (dates, prices) = read_prices(&args.prices)?;
    let signs = signs_from_prices(&prices)?;
    let mut zero = 0;
    for (i, w) in prices.windows(2).enumerate() {
        if w[0] == w[1] {
            zero += 1;
            eprintln!(
                "warning: zero return on {} (row {}) recorded as +1",
                dates[i + 1],
                i + 3
            );
        }
    }
    let instrument = args.instrument.clone().unwrap_or_else(|| {
        args.prices
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_default()
    });
    let series = ReturnSeries::with_dates(signs.signs().to_vec(), dates[1..].to_vec(), instrument)?;
    write_series(&args.out, &series, zero)?;
    println!(
        "{} signs written to {} ({} zero returns)",
        series.len(),
        args.out.display(),
        zero
    );
    Ok(())
}
