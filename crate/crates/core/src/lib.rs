//! Tabular robust Q-learning for Markov decision problems whose transition
//! law is only known to lie in a finite set of candidate kernels.
//!
//! * [`mdp`]: tables, ambiguity sets, the worst-case backup and robust value
//!   iteration.
//! * [`qlearn`]: the sampling-based learning loop and its diagnostics.
//! * [`env`]: the coin-toss game, Wasserstein-ball proxies and the
//!   sign-of-returns market model.
//! * [`eval`]: profit simulation, exact expected profit and backtests.
//! * [`par`]: fan-out over independent jobs, parallel with the `parallel`
//!   feature.
// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod dist;
pub mod env;
pub mod error;
pub mod eval;
pub mod mdp;
pub mod par;
pub mod qlearn;
pub mod space;

pub use dist::Categorical;
pub use error::{Error, Result};
pub use mdp::{AmbiguitySet, DiscountedProblem, QTable, RewardTable, ValueIteration, WorstCase};
pub use par::Execution;
pub use qlearn::{train, BehaviorPolicy, LearningRateSchedule, TrainConfig, TrainResult, TrainState};
pub use space::{FiniteActionSpace, FiniteStateSpace, Label, LabelSpace};
