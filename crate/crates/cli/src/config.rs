//! Run configuration file (TOML).
//!
//! ```toml
//! output_dir = "runs/p1"
//!
//! [problem]
//! kind = "coin"
//! alpha = 0.95
//! params = [0.5, 0.6]
//!
//! [train]
//! iterations = 1000000
//! seed = 7
//! epsilon = 0.1
//! schedule = "visit-harmonic"
//! ```

use std::path::{Path, PathBuf};

use robustq::env::{
    build_coin_problem, build_market_problem, build_wasserstein_proxy, empirical_frequencies,
    smooth_probabilities, MarketModelSpec,
};
use robustq::mdp::{DEFAULT_MAX_ITER, DEFAULT_TOL};
use robustq::qlearn::{BehaviorPolicy, LearningRateSchedule, TrainConfig};
use robustq::{DiscountedProblem, FiniteActionSpace, FiniteStateSpace};
use serde::Deserialize;

use crate::error::{CliError, CliResult};
use crate::files::{read_kernels, read_rewards, read_series, read_text};

/// Environment variable consulted when the config names no output directory.
pub const OUT_DIR_ENV: &str = "ROBUSTQ_OUT_DIR";

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfigFile {
    pub output_dir: Option<PathBuf>,
    pub problem: ProblemSpec,
    #[serde(default)]
    pub train: TrainSection,
    #[serde(default)]
    pub solve: SolveSection,
    #[serde(default)]
    pub eval: EvalSection,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum ProblemSpec {
    Coin {
        #[serde(default = "default_alpha")]
        alpha: f64,
        params: Vec<f64>,
    },
    WassersteinProxy {
        #[serde(default = "default_alpha")]
        alpha: f64,
        #[serde(default = "half")]
        center: f64,
        radius: f64,
        #[serde(default = "default_grid_step")]
        grid_step: f64,
    },
    Market {
        #[serde(default = "default_alpha")]
        alpha: f64,
        #[serde(default = "default_h")]
        h: usize,
        #[serde(default = "default_gamma_smooth")]
        gamma_smooth: f64,
        /// Sign-series file produced by `ingest`.
        series: PathBuf,
        /// One kernel per period; the whole series when empty.
        #[serde(default)]
        periods: Vec<Period>,
    },
    Custom {
        #[serde(default = "default_alpha")]
        alpha: f64,
        n_states: usize,
        n_actions: usize,
        n_kernels: usize,
        kernel_file: PathBuf,
        reward_file: PathBuf,
    },
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Period {
    pub label: String,
    pub start: String,
    pub end: String,
}

fn default_alpha() -> f64 {
    0.95
}
fn half() -> f64 {
    0.5
}
fn default_grid_step() -> f64 {
    0.05
}
fn default_h() -> usize {
    5
}
fn default_gamma_smooth() -> f64 {
    1e-6
}

#[derive(Debug, Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainSection {
    pub iterations: u64,
    pub seed: u64,
    pub epsilon: f64,
    /// `visit-harmonic` or `global-harmonic`.
    pub schedule: String,
    pub offset: f64,
    pub initial_state: usize,
    pub q_init: f64,
    pub stability_window: usize,
}

impl Default for TrainSection {
    fn default() -> Self {
        Self {
            iterations: 1_000_000,
            seed: 0,
            epsilon: 0.1,
            schedule: "visit-harmonic".into(),
            offset: 1.0,
            initial_state: 0,
            q_init: 0.0,
            stability_window: 10,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolveSection {
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for SolveSection {
    fn default() -> Self {
        Self {
            tol: DEFAULT_TOL,
            max_iter: DEFAULT_MAX_ITER,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalSection {
    pub p_true: Vec<f64>,
    pub rounds: u64,
    pub seed: u64,
}

impl Default for EvalSection {
    fn default() -> Self {
        Self {
            p_true: vec![0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9],
            rounds: 100_000,
            seed: 0,
        }
    }
}

fn bad(field: &str, msg: impl std::fmt::Display) -> CliError {
    CliError::user(format!("invalid config field `{field}`: {msg}"))
}

impl RunConfigFile {
    /// Parses and validates; relative paths resolve against the file's
    /// directory.
    pub fn load(path: &Path) -> CliResult<Self> {
        let text = read_text(path)?;
        let mut cfg: RunConfigFile = toml::from_str(&text)
            .map_err(|e| CliError::user(format!("{}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new("."));
        cfg.resolve_paths(base);
        cfg.validate()?;
        Ok(cfg)
    }

    fn resolve_paths(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        match &mut self.problem {
            ProblemSpec::Market { series, .. } => fix(series),
            ProblemSpec::Custom {
                kernel_file,
                reward_file,
                ..
            } => {
                fix(kernel_file);
                fix(reward_file);
            }
            _ => {}
        }
        if let Some(out) = &mut self.output_dir {
            fix(out);
        }
    }

    pub fn validate(&self) -> CliResult<()> {
        let alpha = self.problem.alpha();
        if !(alpha > 0.0 && alpha < 1.0) {
            return Err(bad("problem.alpha", format!("{alpha} is not in (0, 1)")));
        }
        match &self.problem {
            ProblemSpec::Coin { params, .. } => {
                if params.is_empty() {
                    return Err(bad("problem.params", "N = 0: need at least one parameter"));
                }
                if let Some(p) = params.iter().find(|p| !(0.0..=1.0).contains(*p)) {
                    return Err(bad("problem.params", format!("{p} is not in [0, 1]")));
                }
            }
            ProblemSpec::WassersteinProxy {
                center,
                radius,
                grid_step,
                ..
            } => {
                if !(0.0..=1.0).contains(center) {
                    return Err(bad("problem.center", format!("{center} is not in [0, 1]")));
                }
                if !(*radius >= 0.0) {
                    return Err(bad("problem.radius", "must be nonnegative"));
                }
                if !(*grid_step > 0.0) {
                    return Err(bad("problem.grid_step", "must be positive"));
                }
            }
            ProblemSpec::Market {
                h,
                gamma_smooth,
                series,
                ..
            } => {
                MarketModelSpec {
                    h: *h,
                    gamma_smooth: *gamma_smooth,
                }
                .validate()
                .map_err(|e| bad("problem", e))?;
                if !series.exists() {
                    return Err(bad("problem.series", format!("{} does not exist", series.display())));
                }
            }
            ProblemSpec::Custom {
                n_states,
                n_actions,
                n_kernels,
                kernel_file,
                reward_file,
                ..
            } => {
                for (name, v) in [
                    ("problem.n_states", n_states),
                    ("problem.n_actions", n_actions),
                    ("problem.n_kernels", n_kernels),
                ] {
                    if *v == 0 {
                        return Err(bad(name, "must be at least 1"));
                    }
                }
                for (name, f) in [("problem.kernel_file", kernel_file), ("problem.reward_file", reward_file)] {
                    if !f.exists() {
                        return Err(bad(name, format!("{} does not exist", f.display())));
                    }
                }
            }
        }
        let t = &self.train;
        if !(0.0..=1.0).contains(&t.epsilon) {
            return Err(bad("train.epsilon", format!("{} is not in [0, 1]", t.epsilon)));
        }
        if !(t.offset >= 1.0) {
            return Err(bad("train.offset", "must be >= 1"));
        }
        if t.stability_window == 0 {
            return Err(bad("train.stability_window", "must be at least 1"));
        }
        if !t.q_init.is_finite() {
            return Err(bad("train.q_init", "must be finite"));
        }
        self.schedule()?;
        if !(self.solve.tol > 0.0) {
            return Err(bad("solve.tol", "must be positive"));
        }
        if self.solve.max_iter == 0 {
            return Err(bad("solve.max_iter", "must be at least 1"));
        }
        if let Some(p) = self.eval.p_true.iter().find(|p| !(0.0..=1.0).contains(*p)) {
            return Err(bad("eval.p_true", format!("{p} is not in [0, 1]")));
        }
        if self.eval.rounds == 0 {
            return Err(bad("eval.rounds", "must be at least 1"));
        }
        Ok(())
    }

    pub fn schedule(&self) -> CliResult<LearningRateSchedule> {
        let offset = self.train.offset;
        match self.train.schedule.as_str() {
            "visit-harmonic" => Ok(LearningRateSchedule::VisitHarmonic { offset }),
            "global-harmonic" => Ok(LearningRateSchedule::GlobalHarmonic { offset }),
            other => Err(bad(
                "train.schedule",
                format!("`{other}` is not visit-harmonic or global-harmonic"),
            )),
        }
    }

    pub fn train_config(&self) -> CliResult<TrainConfig> {
        let t = &self.train;
        Ok(TrainConfig {
            schedule: self.schedule()?,
            policy: BehaviorPolicy::EpsilonGreedy { epsilon: t.epsilon },
            iterations: t.iterations,
            seed: t.seed,
            initial_state: t.initial_state,
            q_init: t.q_init,
            stability_window: t.stability_window,
            record_visit_trace: false,
        })
    }

    /// Output directory: the flag, then the config value, then `$ROBUSTQ_OUT_DIR`, then `.`.
    pub fn output_dir(&self, flag: Option<&Path>) -> PathBuf {
        resolve_out_dir(flag.or(self.output_dir.as_deref()))
    }

    pub fn build_problem(&self) -> CliResult<DiscountedProblem> {
        let problem = match &self.problem {
            ProblemSpec::Coin { alpha, params } => build_coin_problem(params, *alpha)?.problem,
            ProblemSpec::WassersteinProxy {
                alpha,
                center,
                radius,
                grid_step,
            } => build_wasserstein_proxy(*center, *radius, *grid_step, *alpha)?.problem,
            ProblemSpec::Market {
                alpha,
                h,
                gamma_smooth,
                series,
                periods,
            } => {
                let full = read_series(series)?;
                let parts = if periods.is_empty() {
                    vec![full]
                } else {
                    periods
                        .iter()
                        .map(|p| {
                            full.between(&p.start, &p.end)
                                .map_err(|e| bad("problem.periods", format!("{}: {e}", p.label)))
                        })
                        .collect::<CliResult<Vec<_>>>()?
                };
                let tables = parts
                    .iter()
                    .map(|s| {
                        let counts = empirical_frequencies(s, *h)?;
                        smooth_probabilities(&counts, *gamma_smooth)
                    })
                    .collect::<robustq::Result<Vec<_>>>()?;
                build_market_problem(&tables, *h, *alpha)?
            }
            ProblemSpec::Custom {
                alpha,
                n_states,
                n_actions,
                n_kernels,
                kernel_file,
                reward_file,
            } => {
                let ambiguity = read_kernels(kernel_file, *n_states, *n_actions, *n_kernels)?;
                let rewards = read_rewards(reward_file, *n_states, *n_actions)?;
                DiscountedProblem::new(
                    FiniteStateSpace::range(*n_states)?,
                    FiniteActionSpace::range(*n_actions)?,
                    rewards,
                    ambiguity,
                    *alpha,
                )?
            }
        };
        if self.train.initial_state >= problem.n_states() {
            return Err(bad(
                "train.initial_state",
                format!("{} is not below {}", self.train.initial_state, problem.n_states()),
            ));
        }
        Ok(problem)
    }
}

impl ProblemSpec {
    pub fn alpha(&self) -> f64 {
        match self {
            ProblemSpec::Coin { alpha, .. }
            | ProblemSpec::WassersteinProxy { alpha, .. }
            | ProblemSpec::Market { alpha, .. }
            | ProblemSpec::Custom { alpha, .. } => *alpha,
        }
    }
}

pub fn resolve_out_dir(explicit: Option<&Path>) -> PathBuf {
    match explicit {
        Some(p) => p.to_path_buf(),
        None => std::env::var_os(OUT_DIR_ENV)
            .map(PathBuf::from)
            .unwrap_or_else(|| PathBuf::from(".")),
    }
}
