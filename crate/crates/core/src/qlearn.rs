//! Robust Q-learning over a finite ambiguity set.
//!
//! Each step picks an action with the behavior policy, finds the kernel that
//! minimizes the expected bootstrap target under the current table, samples
//! the next state from that kernel and moves the visited entry toward the
//! sampled target. All other entries stay put.

use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_pcg::Pcg32;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mdp::{DiscountedProblem, QTable};
use crate::par::{self, Execution};

/// Step-size rule. Harmonic rules emit `1 / (offset + n)` where `n` is the
/// global step or the visit count of the updated pair.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum LearningRateSchedule {
    GlobalHarmonic {
        #[serde(default = "one")]
        offset: f64,
    },
    VisitHarmonic {
        #[serde(default = "one")]
        offset: f64,
    },
    /// Explicit rates indexed by step (or by visit count); the last value
    /// repeats past the end.
    CustomSequence {
        rates: Vec<f64>,
        #[serde(default)]
        by_visits: bool,
    },
}

fn one() -> f64 {
    1.0
}

impl Default for LearningRateSchedule {
    fn default() -> Self {
        LearningRateSchedule::VisitHarmonic { offset: 1.0 }
    }
}

impl LearningRateSchedule {
    pub fn validate(&self) -> Result<()> {
        match self {
            Self::GlobalHarmonic { offset } | Self::VisitHarmonic { offset } => {
                if !(*offset >= 1.0 && offset.is_finite()) {
                    return Err(Error::param("offset", format!("{offset} must be >= 1")));
                }
            }
            Self::CustomSequence { rates, .. } => {
                if rates.is_empty() {
                    return Err(Error::param("rates", "custom sequence is empty"));
                }
                if let Some(r) = rates.iter().find(|r| !(0.0..=1.0).contains(*r)) {
                    return Err(Error::param("rates", format!("{r} is not in [0, 1]")));
                }
            }
        }
        Ok(())
    }

    /// Rate for the update at global step `t` of a pair visited `visits`
    /// times before.
    pub fn rate(&self, t: u64, visits: u64) -> f64 {
        match self {
            Self::GlobalHarmonic { offset } => 1.0 / (offset + t as f64),
            Self::VisitHarmonic { offset } => 1.0 / (offset + visits as f64),
            Self::CustomSequence { rates, by_visits } => {
                let i = if *by_visits { visits } else { t };
                rates[(i as usize).min(rates.len() - 1)]
            }
        }
    }
}

/// `learning_rate(schedule, t, visits)`.
pub fn learning_rate(schedule: &LearningRateSchedule, t: u64, visits: u64) -> f64 {
    schedule.rate(t, visits)
}

/// How actions are chosen while learning.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum BehaviorPolicy {
    /// Greedy on the current table with probability `1 - epsilon`, uniform
    /// otherwise.
    EpsilonGreedy { epsilon: f64 },
    FixedTable { actions: Vec<usize> },
    UniformRandom,
}

impl Default for BehaviorPolicy {
    fn default() -> Self {
        BehaviorPolicy::EpsilonGreedy { epsilon: 0.1 }
    }
}

impl BehaviorPolicy {
    pub fn validate(&self, n_states: usize, n_actions: usize) -> Result<()> {
        match self {
            Self::EpsilonGreedy { epsilon } if !(0.0..=1.0).contains(epsilon) => {
                Err(Error::param("epsilon", format!("{epsilon} is not in [0, 1]")))
            }
            Self::FixedTable { actions } => {
                if actions.len() != n_states {
                    return Err(Error::Dimension {
                        what: "fixed policy states",
                        expected: n_states,
                        actual: actions.len(),
                    });
                }
                match actions.iter().find(|&&a| a >= n_actions) {
                    Some(&a) => Err(Error::Index {
                        what: "fixed policy action",
                        index: a,
                        size: n_actions,
                    }),
                    None => Ok(()),
                }
            }
            _ => Ok(()),
        }
    }

    /// Picks an action at state `x`. Epsilon-greedy always consumes one
    /// uniform for the explore decision, then one more when exploring.
    pub fn select_action<R: Rng + ?Sized>(&self, q: &QTable, x: usize, rng: &mut R) -> usize {
        match self {
            Self::EpsilonGreedy { epsilon } => {
                if rng.random::<f64>() < *epsilon {
                    rng.random_range(0..q.n_actions())
                } else {
                    q.argmax(x)
                }
            }
            Self::FixedTable { actions } => actions[x],
            Self::UniformRandom => rng.random_range(0..q.n_actions()),
        }
    }
}

/// Settings of one training run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub schedule: LearningRateSchedule,
    pub policy: BehaviorPolicy,
    pub iterations: u64,
    pub seed: u64,
    pub initial_state: usize,
    pub q_init: f64,
    pub stability_window: usize,
    /// Keep the step index of every visit per pair, for
    /// [`robbins_monro_diagnostics`].
    pub record_visit_trace: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            schedule: LearningRateSchedule::default(),
            policy: BehaviorPolicy::default(),
            iterations: 1_000_000,
            seed: 0,
            initial_state: 0,
            q_init: 0.0,
            stability_window: 10,
            record_visit_trace: false,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self, problem: &DiscountedProblem) -> Result<()> {
        self.schedule.validate()?;
        self.policy.validate(problem.n_states(), problem.n_actions())?;
        if self.initial_state >= problem.n_states() {
            return Err(Error::Index {
                what: "initial state",
                index: self.initial_state,
                size: problem.n_states(),
            });
        }
        if !self.q_init.is_finite() {
            return Err(Error::param("q_init", "must be finite"));
        }
        if self.stability_window == 0 {
            return Err(Error::param("stability_window", "must be at least 1"));
        }
        Ok(())
    }

    /// Steps between checkpoints: one hundredth of the run, at least 1.
    pub fn checkpoint_every(&self) -> u64 {
        (self.iterations / 100).max(1)
    }
}

/// What happened in one step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepRecord {
    pub state: usize,
    pub action: usize,
    pub kernel: usize,
    pub next_state: usize,
    pub rate: f64,
}

/// Loop state of a training run.
#[derive(Debug, Clone)]
pub struct TrainState {
    pub q: QTable,
    /// Row maxima of `q`, kept in sync after each update.
    values: Vec<f64>,
    pub visits: Vec<u64>,
    pub t: u64,
    pub current_state: usize,
    rng: Pcg32,
}

impl TrainState {
    pub fn new(problem: &DiscountedProblem, config: &TrainConfig) -> Result<Self> {
        config.validate(problem)?;
        let q = QTable::filled(problem.n_states(), problem.n_actions(), config.q_init);
        Ok(Self {
            values: q.value_from_q(),
            visits: vec![0; problem.n_states() * problem.n_actions()],
            q,
            t: 0,
            current_state: config.initial_state,
            rng: Pcg32::seed_from_u64(config.seed),
        })
    }

    pub fn visits(&self, x: usize, a: usize) -> u64 {
        self.visits[x * self.q.n_actions() + a]
    }

    /// Samples `count` next states from kernel `k` at `(x, a)` using the run's
    /// random stream.
    pub fn sample_kernel(
        &mut self,
        problem: &DiscountedProblem,
        x: usize,
        a: usize,
        k: usize,
        count: usize,
    ) -> Vec<usize> {
        let dist = problem.ambiguity.kernel(x, a, k);
        (0..count).map(|_| dist.sample(&mut self.rng)).collect()
    }

    /// One loop body: act, pick the worst-case kernel, sample, update.
    pub fn step(&mut self, config: &TrainConfig, problem: &DiscountedProblem) -> StepRecord {
        let x = self.current_state;
        let a = config.policy.select_action(&self.q, x, &mut self.rng);
        let worst = problem.worst_case_with_values(&self.values, x, a);
        let next = problem
            .ambiguity
            .kernel(x, a, worst.index)
            .sample(&mut self.rng);
        let pair = x * self.q.n_actions() + a;
        let rate = config.schedule.rate(self.t, self.visits[pair]);
        let target = problem.rewards.get(x, a, next) + problem.alpha * self.values[next];
        let updated = (1.0 - rate) * self.q.get(x, a) + rate * target;
        self.q.set(x, a, updated);
        self.values[x] = self.q.row_max(x);
        self.visits[pair] += 1;
        self.t += 1;
        self.current_state = next;
        StepRecord {
            state: x,
            action: a,
            kernel: worst.index,
            next_state: next,
            rate,
        }
    }
}

/// `qlearn_step`: advances a copy of `state` by one step.
pub fn qlearn_step(state: &TrainState, config: &TrainConfig, problem: &DiscountedProblem) -> TrainState {
    let mut next = state.clone();
    next.step(config, problem);
    next
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Checkpoint {
    pub step: u64,
    pub policy: Vec<usize>,
    /// `||Q_t - Q*||_inf` when an oracle table was supplied.
    pub oracle_gap: Option<f64>,
    pub q_sup: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct TrainResult {
    pub q: QTable,
    pub visits: Vec<u64>,
    pub steps: u64,
    pub checkpoints: Vec<Checkpoint>,
    /// Counts of the selected worst-case kernel, indexed `(x, a, k)`.
    pub worst_case_counts: Vec<u64>,
    pub n_kernels: usize,
    pub visit_trace: Option<Vec<Vec<u64>>>,
    #[serde(skip)]
    pub duration: Duration,
}

impl TrainResult {
    pub fn greedy_policy(&self) -> Vec<usize> {
        self.q.greedy_policy()
    }

    pub fn worst_case_histogram(&self, x: usize, a: usize) -> &[u64] {
        let start = (x * self.q.n_actions() + a) * self.n_kernels;
        &self.worst_case_counts[start..start + self.n_kernels]
    }

    pub fn is_stable(&self, window: usize) -> bool {
        greedy_policy_stable(&self.checkpoints, window)
    }

    /// Field-by-field equality ignoring wall-clock time.
    pub fn same_outcome(&self, other: &TrainResult) -> bool {
        let bits = |q: &QTable| q.values().iter().map(|v| v.to_bits()).collect::<Vec<_>>();
        bits(&self.q) == bits(&other.q)
            && self.visits == other.visits
            && self.steps == other.steps
            && self.checkpoints == other.checkpoints
            && self.worst_case_counts == other.worst_case_counts
            && self.visit_trace == other.visit_trace
    }
}

fn checkpoint(q: &QTable, step: u64, oracle: Option<&QTable>) -> Checkpoint {
    Checkpoint {
        step,
        policy: q.greedy_policy(),
        oracle_gap: oracle.map(|o| q.sup_distance(o)),
        q_sup: q.sup_norm(),
    }
}

/// Runs `config.iterations` steps from `Q = q_init`, checkpointing every
/// [`TrainConfig::checkpoint_every`] steps and at the end.
pub fn train(
    config: &TrainConfig,
    problem: &DiscountedProblem,
    oracle: Option<&QTable>,
) -> Result<TrainResult> {
    let start = Instant::now();
    let mut state = TrainState::new(problem, config)?;
    if let Some(o) = oracle {
        if o.n_states() != problem.n_states() || o.n_actions() != problem.n_actions() {
            return Err(Error::Dimension {
                what: "oracle Q table entries",
                expected: problem.n_states() * problem.n_actions(),
                actual: o.values().len(),
            });
        }
    }
    let n_actions = problem.n_actions();
    let n_kernels = problem.ambiguity.n_kernels();
    let mut worst_case_counts = vec![0u64; problem.n_states() * n_actions * n_kernels];
    let mut trace = config
        .record_visit_trace
        .then(|| vec![Vec::new(); problem.n_states() * n_actions]);
    let every = config.checkpoint_every();
    let mut checkpoints = Vec::with_capacity(101);
    for _ in 0..config.iterations {
        let rec = state.step(config, problem);
        let pair = rec.state * n_actions + rec.action;
        worst_case_counts[pair * n_kernels + rec.kernel] += 1;
        if let Some(trace) = trace.as_mut() {
            trace[pair].push(state.t - 1);
        }
        if state.t % every == 0 {
            checkpoints.push(checkpoint(&state.q, state.t, oracle));
        }
    }
    if config.iterations > 0 && !config.iterations.is_multiple_of(every) {
        checkpoints.push(checkpoint(&state.q, state.t, oracle));
    }
    Ok(TrainResult {
        q: state.q,
        visits: state.visits,
        steps: state.t,
        checkpoints,
        worst_case_counts,
        n_kernels,
        visit_trace: trace,
        duration: start.elapsed(),
    })
}

/// Independent runs, one per seed, returned in seed order.
pub fn train_seeds(
    config: &TrainConfig,
    problem: &DiscountedProblem,
    seeds: &[u64],
    oracle: Option<&QTable>,
    exec: Execution,
) -> Result<Vec<TrainResult>> {
    par::map(exec, seeds, |&seed| {
        let cfg = TrainConfig {
            seed,
            ..config.clone()
        };
        train(&cfg, problem, oracle)
    })
    .into_iter()
    .collect()
}

/// True iff the last `window` checkpoints carry the same greedy policy.
pub fn greedy_policy_stable(checkpoints: &[Checkpoint], window: usize) -> bool {
    if window == 0 || checkpoints.len() < window {
        return false;
    }
    let tail = &checkpoints[checkpoints.len() - window..];
    tail.iter().all(|c| c.policy == tail[0].policy)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PairRates {
    pub visits: u64,
    pub sum_rates: f64,
    pub sum_squared_rates: f64,
    pub starved: bool,
}

/// Partial sums of realized step sizes per state-action pair.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RobbinsMonroReport {
    pub pairs: Vec<PairRates>,
    pub visit_floor: u64,
    /// Pair indices (`x * |A| + a`) visited fewer than `visit_floor` times.
    pub flagged: Vec<usize>,
}

/// Replays the rates a schedule assigned along a visit trace (step indices
/// of each visit, per pair). This is a heuristic report, not a certificate.
pub fn robbins_monro_diagnostics(
    schedule: &LearningRateSchedule,
    trace: &[Vec<u64>],
    visit_floor: u64,
) -> RobbinsMonroReport {
    let pairs: Vec<PairRates> = trace
        .iter()
        .map(|times| {
            let (sum, sq) = times
                .iter()
                .enumerate()
                .fold((0.0, 0.0), |(s, q), (j, &t)| {
                    let r = schedule.rate(t, j as u64);
                    (s + r, q + r * r)
                });
            PairRates {
                visits: times.len() as u64,
                sum_rates: sum,
                sum_squared_rates: sq,
                starved: (times.len() as u64) < visit_floor,
            }
        })
        .collect();
    let flagged = pairs
        .iter()
        .enumerate()
        .filter(|(_, p)| p.starved)
        .map(|(i, _)| i)
        .collect();
    RobbinsMonroReport {
        pairs,
        visit_floor,
        flagged,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::env::build_coin_problem;

    #[test]
    fn harmonic_rates() {
        let g = LearningRateSchedule::GlobalHarmonic { offset: 1.0 };
        assert_eq!(learning_rate(&g, 0, 7), 1.0);
        assert_eq!(learning_rate(&g, 9, 0), 0.1);
        let v = LearningRateSchedule::VisitHarmonic { offset: 1.0 };
        assert_eq!(learning_rate(&v, 1234, 3), 0.25);
        let c = LearningRateSchedule::CustomSequence {
            rates: vec![0.5, 0.2],
            by_visits: false,
        };
        assert_eq!(c.rate(0, 0), 0.5);
        assert_eq!(c.rate(50, 0), 0.2);
    }

    #[test]
    fn schedule_validation() {
        assert!(LearningRateSchedule::GlobalHarmonic { offset: 0.5 }.validate().is_err());
        assert!(LearningRateSchedule::CustomSequence {
            rates: vec![],
            by_visits: true
        }
        .validate()
        .is_err());
        assert!(LearningRateSchedule::CustomSequence {
            rates: vec![1.5],
            by_visits: true
        }
        .validate()
        .is_err());
    }

    #[test]
    fn zero_epsilon_is_greedy_and_fixed_returns_entry() {
        let q = QTable::from_vec(2, 3, vec![0.0, 1.0, 0.5, 2.0, 0.0, 0.0]).unwrap();
        let mut rng = Pcg32::seed_from_u64(1);
        let greedy = BehaviorPolicy::EpsilonGreedy { epsilon: 0.0 };
        for _ in 0..100 {
            assert_eq!(greedy.select_action(&q, 0, &mut rng), 1);
            assert_eq!(greedy.select_action(&q, 1, &mut rng), 0);
        }
        let fixed = BehaviorPolicy::FixedTable { actions: vec![2, 1] };
        assert_eq!(fixed.select_action(&q, 0, &mut rng), 2);
        assert_eq!(fixed.select_action(&q, 1, &mut rng), 1);
    }

    #[test]
    fn zero_iterations_returns_initial_table() {
        let p = build_coin_problem(&[0.5, 0.6], 0.95).unwrap();
        let cfg = TrainConfig {
            iterations: 0,
            q_init: 1.5,
            ..Default::default()
        };
        let res = train(&cfg, &p, None).unwrap();
        assert_eq!(res.q, QTable::filled(11, 3, 1.5));
        assert!(res.checkpoints.is_empty());
        assert_eq!(res.steps, 0);
    }

    #[test]
    fn config_validation() {
        let p = build_coin_problem(&[0.5], 0.95).unwrap();
        let bad = [
            TrainConfig {
                initial_state: 11,
                ..Default::default()
            },
            TrainConfig {
                stability_window: 0,
                ..Default::default()
            },
            TrainConfig {
                policy: BehaviorPolicy::EpsilonGreedy { epsilon: 1.1 },
                ..Default::default()
            },
            TrainConfig {
                policy: BehaviorPolicy::FixedTable { actions: vec![0; 3] },
                ..Default::default()
            },
        ];
        for cfg in bad {
            assert!(cfg.validate(&p).is_err(), "{cfg:?}");
        }
    }

    #[test]
    fn stability_window() {
        let cp = |policy: Vec<usize>, step| Checkpoint {
            step,
            policy,
            oracle_gap: None,
            q_sup: 0.0,
        };
        let same: Vec<_> = (1..=5).map(|s| cp(vec![0, 1], s)).collect();
        assert!(greedy_policy_stable(&same, 5));
        assert!(!greedy_policy_stable(&same, 6));
        let mut changed = same.clone();
        changed.push(cp(vec![0, 2], 6));
        assert!(!greedy_policy_stable(&changed, 3));
        assert!(greedy_policy_stable(&changed, 1));
    }

    #[test]
    fn diagnostics_closed_form() {
        let v = LearningRateSchedule::VisitHarmonic { offset: 1.0 };
        let trace = vec![vec![], vec![3, 8, 20, 21]];
        let report = robbins_monro_diagnostics(&v, &trace, 1);
        assert_eq!(report.pairs[0].sum_rates, 0.0);
        assert_eq!(report.flagged, vec![0]);
        let expected: f64 = (0..4).map(|j| 1.0 / ((1 + j) * (1 + j)) as f64).sum();
        assert!((report.pairs[1].sum_squared_rates - expected).abs() < 1e-15);
        assert!(report.pairs[1].sum_squared_rates < std::f64::consts::PI.powi(2) / 6.0);
    }
}
