//! Policy evaluation: coin-toss profit (simulated and exact) and sign-series
//! backtests, plus a side-by-side comparison table.

use rand::SeedableRng;
use rand_pcg::Pcg32;
use serde::{Deserialize, Serialize};

use crate::dist::Categorical;
use crate::env::{
    binomial_pmf, coin_reward, market_state_index, BinomialSpec, ReturnSeries, COIN_ACTIONS,
    COIN_FLIPS, MARKET_ACTIONS,
};
use crate::error::{Error, Result};
use crate::par::{self, Execution};

/// Action index per state.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct PolicyTable(Vec<usize>);

impl PolicyTable {
    pub fn new(actions: Vec<usize>, n_actions: usize) -> Result<Self> {
        if actions.is_empty() {
            return Err(Error::Structure("policy table is empty".into()));
        }
        if let Some(&a) = actions.iter().find(|&&a| a >= n_actions) {
            return Err(Error::Index {
                what: "policy action",
                index: a,
                size: n_actions,
            });
        }
        Ok(Self(actions))
    }

    pub fn constant(n_states: usize, action: usize) -> Self {
        Self(vec![action; n_states])
    }

    /// Builds a coin or market policy from action labels in `{-1, 0, 1}`.
    pub fn from_signed(labels: &[i64]) -> Result<Self> {
        let actions = labels
            .iter()
            .map(|l| {
                COIN_ACTIONS.iter().position(|a| a == l).ok_or_else(|| {
                    Error::param("policy", format!("action label {l} is not -1, 0 or 1"))
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(actions, COIN_ACTIONS.len())
    }

    /// Action labels in `{-1, 0, 1}`.
    pub fn signed(&self) -> Vec<i64> {
        self.0.iter().map(|&a| COIN_ACTIONS[a]).collect()
    }

    pub fn actions(&self) -> &[usize] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    fn expect_states(&self, n: usize) -> Result<()> {
        if self.0.len() != n {
            return Err(Error::Dimension {
                what: "policy states",
                expected: n,
                actual: self.0.len(),
            });
        }
        Ok(())
    }
}

/// Always trade in the direction of the newest sign.
pub fn trend_following_policy(h: usize) -> PolicyTable {
    // Newest sign is the lowest bit of the state index.
    PolicyTable((0..1usize << h).map(|x| if x & 1 == 1 { 2 } else { 0 }).collect())
}

/// Always long.
pub fn buy_and_hold_policy(h: usize) -> PolicyTable {
    PolicyTable::constant(1 << h, 2)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ProfitReport {
    pub rounds: u64,
    pub cumulative_profit: f64,
    pub per_round_mean: f64,
    /// Sample standard deviation of per-round rewards over `sqrt(rounds)`.
    pub std_error: f64,
    pub seed: u64,
}

fn coin_pmf(p_true: f64) -> Result<Categorical> {
    Ok(binomial_pmf(BinomialSpec::new(COIN_FLIPS, p_true)?))
}

/// Plays `rounds` rounds with i.i.d. `Bin(10, p_true)` sums; round `t` pays
/// `coin_reward(X_t, policy(X_t), X_{t+1})`.
pub fn rollout_coin(policy: &PolicyTable, p_true: f64, rounds: u64, seed: u64) -> Result<ProfitReport> {
    if rounds == 0 {
        return Err(Error::param("rounds", "must be at least 1"));
    }
    policy.expect_states(COIN_FLIPS as usize + 1)?;
    let pmf = coin_pmf(p_true)?;
    let mut rng = Pcg32::seed_from_u64(seed);
    let mut x = pmf.sample(&mut rng);
    let (mut sum, mut sum_sq) = (0i64, 0i64);
    for _ in 0..rounds {
        let next = pmf.sample(&mut rng);
        let r = coin_reward(x as i64, COIN_ACTIONS[policy.0[x]], next as i64);
        sum += r;
        sum_sq += r * r;
        x = next;
    }
    let n = rounds as f64;
    let mean = sum as f64 / n;
    let std_error = if rounds > 1 {
        let var = (sum_sq as f64 - n * mean * mean) / (n - 1.0);
        (var.max(0.0) / n).sqrt()
    } else {
        0.0
    };
    Ok(ProfitReport {
        rounds,
        cumulative_profit: sum as f64,
        per_round_mean: mean,
        std_error,
        seed,
    })
}

/// Exact expected reward per round under `Bin(10, p_true)`.
pub fn expected_profit_coin(policy: &PolicyTable, p_true: f64) -> Result<f64> {
    policy.expect_states(COIN_FLIPS as usize + 1)?;
    let pmf = coin_pmf(p_true)?;
    Ok(pmf.expect(|x| {
        let a = COIN_ACTIONS[policy.0[x]];
        pmf.expect(|y| coin_reward(x as i64, a, y as i64) as f64)
    }))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BacktestReport {
    pub trades: u64,
    pub mean_reward_per_trade: f64,
    pub cumulative_reward: f64,
    pub period: String,
}

/// Trades every step after the first `h` signs: the state is the last `h`
/// signs and the reward is the action times the following sign.
pub fn backtest(policy: &PolicyTable, series: &ReturnSeries, h: usize) -> Result<BacktestReport> {
    if h == 0 {
        return Err(Error::param("h", "must be at least 1"));
    }
    if series.len() <= h {
        return Err(Error::Structure(format!(
            "series of length {} leaves no trades for window {h}",
            series.len()
        )));
    }
    policy.expect_states(1 << h)?;
    let signs = series.signs();
    let cumulative: i64 = (h..signs.len())
        .map(|t| MARKET_ACTIONS[policy.0[market_state_index(&signs[t - h..t])]] * signs[t])
        .sum();
    let trades = (signs.len() - h) as u64;
    let period = match series.date_range() {
        Some((a, b)) => format!("{a}..{b}"),
        None => String::new(),
    };
    Ok(BacktestReport {
        trades,
        mean_reward_per_trade: cumulative as f64 / trades as f64,
        cumulative_reward: cumulative as f64,
        period,
    })
}

/// How each policy is scored in [`compare_policies`].
#[derive(Debug, Clone)]
pub enum Evaluator {
    /// Exact expected reward per round, one column per `p_true`.
    CoinExact { p_true: Vec<f64> },
    /// Simulated cumulative profit, one column per `p_true`. Cell `i` of the
    /// table (row-major) uses seed `seed + i`.
    CoinRollout {
        p_true: Vec<f64>,
        rounds: u64,
        seed: u64,
    },
    /// Mean reward per trade, one column per labeled period.
    Backtest {
        periods: Vec<(String, ReturnSeries)>,
        h: usize,
    },
}

impl Evaluator {
    fn columns(&self) -> Vec<String> {
        match self {
            Self::CoinExact { p_true } | Self::CoinRollout { p_true, .. } => {
                p_true.iter().map(|p| format!("{p}")).collect()
            }
            Self::Backtest { periods, .. } => periods.iter().map(|(l, _)| l.clone()).collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ComparisonRow {
    pub label: String,
    pub values: Vec<f64>,
    /// Standard error per cell, for simulated evaluators.
    pub std_errors: Vec<Option<f64>>,
    /// Whether this row attains the column maximum; ties mark every row.
    pub best: Vec<bool>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Comparison {
    pub columns: Vec<String>,
    pub rows: Vec<ComparisonRow>,
}

/// Scores every policy under `evaluator`, rows in input order.
pub fn compare_policies(
    policies: &[(String, PolicyTable)],
    evaluator: &Evaluator,
    exec: Execution,
) -> Result<Comparison> {
    let columns = evaluator.columns();
    let n_cols = columns.len();
    let cells = par::map_range(exec, policies.len() * n_cols, |i| {
        let (row, col) = (i / n_cols, i % n_cols);
        let policy = &policies[row].1;
        match evaluator {
            Evaluator::CoinExact { p_true } => {
                expected_profit_coin(policy, p_true[col]).map(|v| (v, None))
            }
            Evaluator::CoinRollout {
                p_true,
                rounds,
                seed,
            } => rollout_coin(policy, p_true[col], *rounds, seed.wrapping_add(i as u64))
                .map(|r| (r.cumulative_profit, Some(r.std_error * *rounds as f64))),
            Evaluator::Backtest { periods, h } => {
                backtest(policy, &periods[col].1, *h).map(|r| (r.mean_reward_per_trade, None))
            }
        }
    })
    .into_iter()
    .collect::<Result<Vec<_>>>()?;

    let mut rows: Vec<ComparisonRow> = policies
        .iter()
        .enumerate()
        .map(|(r, (label, _))| {
            let row = &cells[r * n_cols..(r + 1) * n_cols];
            ComparisonRow {
                label: label.clone(),
                values: row.iter().map(|c| c.0).collect(),
                std_errors: row.iter().map(|c| c.1).collect(),
                best: vec![false; n_cols],
            }
        })
        .collect();
    for col in 0..n_cols {
        let max = rows
            .iter()
            .map(|r| r.values[col])
            .fold(f64::NEG_INFINITY, f64::max);
        for row in &mut rows {
            row.best[col] = row.values[col] == max;
        }
    }
    Ok(Comparison { columns, rows })
}
