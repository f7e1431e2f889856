//! The coin-toss betting game.
//!
//! The state is the number of heads among ten coins. The agent bets that the
//! next count is strictly higher (`+1`), strictly lower (`-1`), or abstains
//! (`0`); a correct bet pays one unit and a wrong bet or a tie costs one.

use std::ops::Deref;

use super::binomial::{binomial_pmf, wasserstein1_binomial, BinomialSpec};
use crate::error::{Error, Result};
use crate::mdp::{AmbiguitySet, DiscountedProblem, RewardTable};
use crate::space::{FiniteActionSpace, FiniteStateSpace};

pub const COIN_FLIPS: u32 = 10;

/// Action labels in index order.
pub const COIN_ACTIONS: [i64; 3] = [-1, 0, 1];

/// `a 1{x < x'} - a 1{x > x'} - |a| 1{x = x'}`.
pub fn coin_reward(x: i64, a: i64, next: i64) -> i64 {
    match x.cmp(&next) {
        std::cmp::Ordering::Less => a,
        std::cmp::Ordering::Greater => -a,
        std::cmp::Ordering::Equal => -a.abs(),
    }
}

/// A coin-toss problem whose ambiguity set is `{Bin(10, p) : p in params}` at
/// every state-action pair.
#[derive(Debug, Clone)]
pub struct CoinTossProblem {
    pub params: Vec<f64>,
    pub problem: DiscountedProblem,
}

impl Deref for CoinTossProblem {
    type Target = DiscountedProblem;

    fn deref(&self) -> &DiscountedProblem {
        &self.problem
    }
}

pub fn build_coin_problem(params: &[f64], alpha: f64) -> Result<CoinTossProblem> {
    if params.is_empty() {
        return Err(Error::Structure(
            "coin toss needs at least one binomial parameter".into(),
        ));
    }
    let n_states = COIN_FLIPS as usize + 1;
    let kernels = params
        .iter()
        .map(|&p| BinomialSpec::new(COIN_FLIPS, p).map(binomial_pmf))
        .collect::<Result<Vec<_>>>()?;
    let states = FiniteStateSpace::range(n_states)?;
    let actions = FiniteActionSpace::scalar(COIN_ACTIONS)?;
    let rewards = RewardTable::from_fn(n_states, COIN_ACTIONS.len(), |x, a, y| {
        coin_reward(x as i64, COIN_ACTIONS[a], y as i64) as f64
    })?;
    let ambiguity = AmbiguitySet::state_independent(n_states, COIN_ACTIONS.len(), kernels)?;
    Ok(CoinTossProblem {
        params: params.to_vec(),
        problem: DiscountedProblem::new(states, actions, rewards, ambiguity, alpha)?,
    })
}

/// Grid points `center + k * step` in `[0, 1]` within W1 distance `radius` of
/// `Bin(10, center)`, in ascending order.
pub fn proxy_grid(center: f64, radius: f64, step: f64) -> Result<Vec<f64>> {
    if !(step > 0.0) {
        return Err(Error::param("grid_step", format!("{step} must be positive")));
    }
    if !(radius >= 0.0) {
        return Err(Error::param("radius", format!("{radius} must be nonnegative")));
    }
    BinomialSpec::new(COIN_FLIPS, center)?;
    let reach = (1.0 / step).ceil() as i64;
    let mut grid = Vec::new();
    for k in -reach..=reach {
        // Snap to 1e-12 so that 0.5 - 2 * 0.05 lands on 0.4.
        let p = ((center + k as f64 * step) * 1e12).round() / 1e12;
        if !(0.0..=1.0).contains(&p) {
            continue;
        }
        if wasserstein1_binomial(center, p, COIN_FLIPS)? <= radius + 1e-12 {
            grid.push(p);
        }
    }
    Ok(grid)
}

/// Finite stand-in for the W1 ball of `radius` around `Bin(10, center)`: all
/// binomials on the parameter grid that fall inside the ball.
pub fn build_wasserstein_proxy(
    center: f64,
    radius: f64,
    step: f64,
    alpha: f64,
) -> Result<CoinTossProblem> {
    build_coin_problem(&proxy_grid(center, radius, step)?, alpha)
}
