//! Sign-of-returns market model.
//!
//! A state is the window of the last `h` return signs, oldest first. One step
//! shifts the window left by one and appends the newest sign, so only the
//! last component of the successor is random.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::dist::Categorical;
use crate::error::{Error, Result};
use crate::mdp::{AmbiguitySet, DiscountedProblem, RewardTable};
use crate::space::{FiniteActionSpace, FiniteStateSpace};

/// Action labels in index order: short, flat, long.
pub const MARKET_ACTIONS: [i64; 3] = [-1, 0, 1];

/// Sequence of return signs in `{-1, +1}` with optional per-sign dates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReturnSeries {
    signs: Vec<i64>,
    /// Empty, or one date per sign.
    #[serde(default)]
    dates: Vec<String>,
    #[serde(default)]
    pub instrument: String,
}

impl ReturnSeries {
    pub fn new(signs: Vec<i64>) -> Result<Self> {
        Self::with_dates(signs, Vec::new(), String::new())
    }

    pub fn with_dates(signs: Vec<i64>, dates: Vec<String>, instrument: String) -> Result<Self> {
        if signs.is_empty() {
            return Err(Error::Structure("return series is empty".into()));
        }
        if let Some((i, s)) = signs.iter().enumerate().find(|(_, &s)| s != -1 && s != 1) {
            return Err(Error::param("signs", format!("entry {i} = {s} is not -1 or +1")));
        }
        if !dates.is_empty() && dates.len() != signs.len() {
            return Err(Error::Dimension {
                what: "series dates",
                expected: signs.len(),
                actual: dates.len(),
            });
        }
        Ok(Self {
            signs,
            dates,
            instrument,
        })
    }

    pub fn signs(&self) -> &[i64] {
        &self.signs
    }

    pub fn dates(&self) -> &[String] {
        &self.dates
    }

    pub fn len(&self) -> usize {
        self.signs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.signs.is_empty()
    }

    /// First and last date, when dated.
    pub fn date_range(&self) -> Option<(&str, &str)> {
        Some((self.dates.first()?, self.dates.last()?))
    }

    /// Entries whose date lies in `[start, end]` (ISO dates compare
    /// lexicographically).
    pub fn between(&self, start: &str, end: &str) -> Result<Self> {
        if self.dates.is_empty() {
            return Err(Error::Structure("series has no dates to split on".into()));
        }
        let (signs, dates): (Vec<i64>, Vec<String>) = self
            .signs
            .iter()
            .zip(&self.dates)
            .filter(|(_, d)| d.as_str() >= start && d.as_str() <= end)
            .map(|(&s, d)| (s, d.clone()))
            .unzip();
        if signs.is_empty() {
            return Err(Error::Structure(format!("no observations between {start} and {end}")));
        }
        Self::with_dates(signs, dates, self.instrument.clone())
    }

    /// Running sum of the signs.
    pub fn cumulative(&self) -> Vec<i64> {
        self.signs
            .iter()
            .scan(0, |acc, &s| {
                *acc += s;
                Some(*acc)
            })
            .collect()
    }
}

/// Signs of consecutive price changes; a zero change counts as `+1`.
pub fn signs_from_prices(prices: &[f64]) -> Result<ReturnSeries> {
    if prices.len() < 2 {
        return Err(Error::Structure(format!(
            "need at least 2 prices, got {}",
            prices.len()
        )));
    }
    if let Some((i, p)) = prices
        .iter()
        .enumerate()
        .find(|(_, &p)| !(p > 0.0 && p.is_finite()))
    {
        return Err(Error::param("prices", format!("price {i} = {p} is not positive")));
    }
    let signs = prices
        .windows(2)
        .map(|w| if w[1] >= w[0] { 1 } else { -1 })
        .collect();
    ReturnSeries::new(signs)
}

/// Window length and smoothing constant of the market model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MarketModelSpec {
    pub h: usize,
    pub gamma_smooth: f64,
}

impl Default for MarketModelSpec {
    fn default() -> Self {
        Self {
            h: 5,
            gamma_smooth: 1e-6,
        }
    }
}

impl MarketModelSpec {
    pub fn validate(&self) -> Result<()> {
        check_h(self.h)?;
        if !(self.gamma_smooth > 0.0) {
            return Err(Error::param("gamma_smooth", "must be positive"));
        }
        Ok(())
    }
}

fn check_h(h: usize) -> Result<()> {
    if h == 0 || h > 20 {
        return Err(Error::param("h", format!("{h} is not in 1..=20")));
    }
    Ok(())
}

#[inline]
fn sign_bit(s: i64) -> usize {
    usize::from(s > 0)
}

#[inline]
fn bit_sign(b: usize) -> i64 {
    if b & 1 == 1 {
        1
    } else {
        -1
    }
}

/// Dense index of a window of signs, oldest first.
pub fn market_state_index(window: &[i64]) -> usize {
    window.iter().fold(0, |acc, &s| (acc << 1) | sign_bit(s))
}

/// All `2^h` windows in lexicographic order with `-1 < +1`.
pub fn encode_market_states(h: usize) -> Result<FiniteStateSpace> {
    check_h(h)?;
    let labels = (0..1usize << h)
        .map(|i| (0..h).map(|c| bit_sign(i >> (h - 1 - c))).collect())
        .collect();
    FiniteStateSpace::new(labels)
}

/// Window counts per state and next sign. Column 0 is `-1`, column 1 is `+1`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FrequencyTable {
    pub h: usize,
    pub counts: Vec<[u64; 2]>,
}

impl FrequencyTable {
    /// Number of windows scanned. Each window is counted once per prefix
    /// class; the two states sharing that prefix both see it.
    pub fn total_windows(&self) -> u64 {
        let half = self.counts.len() / 2;
        self.counts[..half].iter().flatten().sum()
    }

    pub fn get(&self, state: usize, sign: i64) -> u64 {
        self.counts[state][sign_bit(sign)]
    }
}

/// Counts, for every state `x` and sign `i`, the windows of length `h` equal
/// to `(x[1..], i)`.
pub fn empirical_frequencies(series: &ReturnSeries, h: usize) -> Result<FrequencyTable> {
    check_h(h)?;
    if series.len() < h {
        return Err(Error::Structure(format!(
            "series of length {} is shorter than the window {h}",
            series.len()
        )));
    }
    let prefix_classes = 1usize << (h - 1);
    let mut by_prefix = vec![[0u64; 2]; prefix_classes];
    for w in series.signs().windows(h) {
        let prefix = market_state_index(&w[..h - 1]);
        by_prefix[prefix][sign_bit(w[h - 1])] += 1;
    }
    let counts = (0..1usize << h)
        .map(|x| by_prefix[x & (prefix_classes - 1)])
        .collect();
    Ok(FrequencyTable { h, counts })
}

/// Smoothed next-sign probabilities per state. Column 0 is `-1`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MarketProbabilities {
    pub h: usize,
    pub probs: Vec<[f64; 2]>,
}

/// `p_i(x) = (count_i(x) + gamma / 2) / (gamma + count_-1(x) + count_+1(x))`.
pub fn smooth_probabilities(table: &FrequencyTable, gamma_smooth: f64) -> Result<MarketProbabilities> {
    if !(gamma_smooth > 0.0) {
        return Err(Error::param("gamma_smooth", "must be positive"));
    }
    let probs = table
        .counts
        .iter()
        .map(|c| {
            let denom = gamma_smooth + (c[0] + c[1]) as f64;
            let down = (c[0] as f64 + gamma_smooth / 2.0) / denom;
            [down, 1.0 - down]
        })
        .collect();
    Ok(MarketProbabilities { h: table.h, probs })
}

/// One kernel per probability table, shifting the window and drawing the
/// newest sign. Reward is the action times the newest sign of the successor.
pub fn build_market_problem(
    tables: &[MarketProbabilities],
    h: usize,
    alpha: f64,
) -> Result<DiscountedProblem> {
    check_h(h)?;
    if tables.is_empty() {
        return Err(Error::Structure("market problem needs at least one table".into()));
    }
    let n_states = 1usize << h;
    for t in tables {
        if t.h != h || t.probs.len() != n_states {
            return Err(Error::Dimension {
                what: "market probability table states",
                expected: n_states,
                actual: t.probs.len(),
            });
        }
    }
    let mask = n_states - 1;
    let mut per_state = Vec::with_capacity(n_states);
    for x in 0..n_states {
        let shifted = (x << 1) & mask;
        let kernels = tables
            .iter()
            .map(|t| {
                let mut probs = vec![0.0; n_states];
                probs[shifted] = t.probs[x][0];
                probs[shifted | 1] = t.probs[x][1];
                Categorical::new(probs).map(Arc::new)
            })
            .collect::<Result<Vec<_>>>()?;
        per_state.push(kernels);
    }
    let ambiguity = AmbiguitySet::from_fn(n_states, MARKET_ACTIONS.len(), |x, _| {
        per_state[x].clone()
    })?;
    let rewards = RewardTable::from_fn(n_states, MARKET_ACTIONS.len(), |_, a, y| {
        (MARKET_ACTIONS[a] * bit_sign(y)) as f64
    })?;
    DiscountedProblem::new(
        encode_market_states(h)?,
        FiniteActionSpace::scalar(MARKET_ACTIONS)?,
        rewards,
        ambiguity,
        alpha,
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn state_encoding() {
        assert_eq!(encode_market_states(1).unwrap().labels(), &[vec![-1], vec![1]]);
        assert_eq!(
            encode_market_states(2).unwrap().labels(),
            &[vec![-1, -1], vec![-1, 1], vec![1, -1], vec![1, 1]]
        );
        let five = encode_market_states(5).unwrap();
        assert_eq!(five.len(), 32);
        for i in 0..32 {
            assert_eq!(market_state_index(five.label(i)), i);
        }
    }

    #[test]
    fn constant_up_series_counts() {
        let s = ReturnSeries::new(vec![1, 1, 1]).unwrap();
        let t = empirical_frequencies(&s, 2).unwrap();
        // States (-1,+1) and (+1,+1) share the prefix (+1).
        assert_eq!(t.counts, vec![[0, 0], [0, 2], [0, 0], [0, 2]]);
        assert_eq!(t.total_windows(), 2);
    }

    #[test]
    fn too_short_series_rejected() {
        let s = ReturnSeries::new(vec![1, -1]).unwrap();
        assert!(empirical_frequencies(&s, 3).is_err());
    }

    #[test]
    fn smoothing_edge_cases() {
        let t = FrequencyTable {
            h: 1,
            counts: vec![[0, 0], [1, 3]],
        };
        let p = smooth_probabilities(&t, 1e-9).unwrap();
        assert_eq!(p.probs[0], [0.5, 0.5]);
        assert_abs_diff_eq!(p.probs[1][0], 0.25, epsilon = 1e-9);
        assert_abs_diff_eq!(p.probs[1][1], 0.75, epsilon = 1e-9);
        assert!(smooth_probabilities(&t, 0.0).is_err());
    }

    #[test]
    fn prices_to_signs() {
        assert_eq!(signs_from_prices(&[100.0, 101.0, 99.0]).unwrap().signs(), &[1, -1]);
        assert_eq!(signs_from_prices(&[100.0, 100.0]).unwrap().signs(), &[1]);
        assert_eq!(signs_from_prices(&[1.0, 2.0, 3.0, 4.0]).unwrap().signs(), &[1, 1, 1]);
        assert!(signs_from_prices(&[100.0, 0.0]).is_err());
        assert!(signs_from_prices(&[100.0]).is_err());
    }

    #[test]
    fn market_reward_uses_newest_sign() {
        let t = smooth_probabilities(
            &empirical_frequencies(&ReturnSeries::new(vec![1, -1, 1, 1, -1]).unwrap(), 2).unwrap(),
            1e-6,
        )
        .unwrap();
        let p = build_market_problem(&[t], 2, 0.9).unwrap();
        // (x', newest = -1) under long position.
        let next = market_state_index(&[1, -1]);
        assert_eq!(p.rewards.get(0, 2, next), -1.0);
        assert_eq!(p.rewards.get(0, 0, next), 1.0);
        assert_eq!(p.rewards.get(0, 1, next), 0.0);
    }

    #[test]
    fn split_by_date() {
        let s = ReturnSeries::with_dates(
            vec![1, -1, 1, 1],
            ["2020-01-01", "2020-01-02", "2020-01-03", "2020-01-06"]
                .map(String::from)
                .to_vec(),
            "X".into(),
        )
        .unwrap();
        let mid = s.between("2020-01-02", "2020-01-03").unwrap();
        assert_eq!(mid.signs(), &[-1, 1]);
        assert_eq!(mid.date_range(), Some(("2020-01-02", "2020-01-03")));
        assert!(s.between("2021-01-01", "2021-12-31").is_err());
        assert_eq!(s.cumulative(), vec![1, 0, 1, 2]);
    }
}
