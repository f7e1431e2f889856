//! Finite robust MDPs: tables, ambiguity sets and the worst-case operators.
//!
//! The robust backup of a Q table is
//!
//! ```text
//! (H Q)(x, a) = min_k  sum_x' P_k(x, a)[x'] * (r(x, a, x') + alpha * max_b Q(x', b))
//! ```
//!
//! which is an `alpha`-contraction in the sup norm. Its unique fixed point is
//! the robust optimal Q function, computed here by plain iteration from zero.

use std::sync::Arc;

use serde::Serialize;

use crate::dist::Categorical;
use crate::error::{Error, Result};
use crate::space::{FiniteActionSpace, FiniteStateSpace};

/// Dense `|X| x |A|` table of Q values, row-major by state.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct QTable {
    n_states: usize,
    n_actions: usize,
    values: Vec<f64>,
}

impl QTable {
    pub fn filled(n_states: usize, n_actions: usize, value: f64) -> Self {
        Self {
            n_states,
            n_actions,
            values: vec![value; n_states * n_actions],
        }
    }

    pub fn zeros(n_states: usize, n_actions: usize) -> Self {
        Self::filled(n_states, n_actions, 0.0)
    }

    pub fn from_vec(n_states: usize, n_actions: usize, values: Vec<f64>) -> Result<Self> {
        if values.len() != n_states * n_actions {
            return Err(Error::Dimension {
                what: "Q table entries",
                expected: n_states * n_actions,
                actual: values.len(),
            });
        }
        if let Some(v) = values.iter().find(|v| !v.is_finite()) {
            return Err(Error::param("q", format!("non-finite entry {v}")));
        }
        Ok(Self {
            n_states,
            n_actions,
            values,
        })
    }

    pub fn from_fn(n_states: usize, n_actions: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut values = Vec::with_capacity(n_states * n_actions);
        for x in 0..n_states {
            for a in 0..n_actions {
                values.push(f(x, a));
            }
        }
        Self {
            n_states,
            n_actions,
            values,
        }
    }

    pub fn n_states(&self) -> usize {
        self.n_states
    }

    pub fn n_actions(&self) -> usize {
        self.n_actions
    }

    #[inline]
    pub fn get(&self, x: usize, a: usize) -> f64 {
        self.values[x * self.n_actions + a]
    }

    #[inline]
    pub fn set(&mut self, x: usize, a: usize, value: f64) {
        self.values[x * self.n_actions + a] = value;
    }

    pub fn row(&self, x: usize) -> &[f64] {
        &self.values[x * self.n_actions..(x + 1) * self.n_actions]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// `max_b Q(x, b)`.
    pub fn row_max(&self, x: usize) -> f64 {
        self.row(x).iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    /// Smallest action index attaining `max_b Q(x, b)`.
    pub fn argmax(&self, x: usize) -> usize {
        let row = self.row(x);
        let mut best = 0;
        for (b, &v) in row.iter().enumerate().skip(1) {
            if v > row[best] {
                best = b;
            }
        }
        best
    }

    /// Greedy action index per state, smallest index on ties.
    pub fn greedy_policy(&self) -> Vec<usize> {
        (0..self.n_states).map(|x| self.argmax(x)).collect()
    }

    /// `V(x) = max_a Q(x, a)`.
    pub fn value_from_q(&self) -> Vec<f64> {
        (0..self.n_states).map(|x| self.row_max(x)).collect()
    }

    pub fn sup_norm(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// `||self - other||_inf`.
    pub fn sup_distance(&self, other: &QTable) -> f64 {
        assert_eq!(self.values.len(), other.values.len(), "Q table shapes differ");
        self.values
            .iter()
            .zip(&other.values)
            .fold(0.0, |m, (a, b)| m.max((a - b).abs()))
    }
}

/// Reward lookup `r(x, a, x')`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RewardTable {
    n_states: usize,
    n_actions: usize,
    values: Vec<f64>,
}

impl RewardTable {
    pub fn from_fn(
        n_states: usize,
        n_actions: usize,
        mut f: impl FnMut(usize, usize, usize) -> f64,
    ) -> Result<Self> {
        let mut values = Vec::with_capacity(n_states * n_actions * n_states);
        for x in 0..n_states {
            for a in 0..n_actions {
                for y in 0..n_states {
                    let r = f(x, a, y);
                    if !r.is_finite() {
                        return Err(Error::param("reward", format!("r({x}, {a}, {y}) = {r}")));
                    }
                    values.push(r);
                }
            }
        }
        Ok(Self {
            n_states,
            n_actions,
            values,
        })
    }

    pub fn zeros(n_states: usize, n_actions: usize) -> Self {
        Self {
            n_states,
            n_actions,
            values: vec![0.0; n_states * n_actions * n_states],
        }
    }

    #[inline]
    pub fn get(&self, x: usize, a: usize, next: usize) -> f64 {
        self.values[(x * self.n_actions + a) * self.n_states + next]
    }

    /// Largest absolute reward.
    pub fn bound(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }
}

/// For each `(x, a)`, an ordered list of `N` candidate transition kernels.
#[derive(Debug, Clone, PartialEq)]
pub struct AmbiguitySet {
    n_states: usize,
    n_actions: usize,
    n_kernels: usize,
    kernels: Vec<Arc<Categorical>>,
}

impl AmbiguitySet {
    /// Builds the set from a per-pair constructor; every pair must yield the
    /// same number of kernels, each over `n_states` states.
    pub fn from_fn(
        n_states: usize,
        n_actions: usize,
        mut f: impl FnMut(usize, usize) -> Vec<Arc<Categorical>>,
    ) -> Result<Self> {
        let mut kernels = Vec::new();
        let mut n_kernels = None;
        for x in 0..n_states {
            for a in 0..n_actions {
                let list = f(x, a);
                let n = *n_kernels.get_or_insert(list.len());
                if list.len() != n {
                    return Err(Error::Dimension {
                        what: "kernels per state-action pair",
                        expected: n,
                        actual: list.len(),
                    });
                }
                for k in &list {
                    if k.len() != n_states {
                        return Err(Error::Dimension {
                            what: "kernel length",
                            expected: n_states,
                            actual: k.len(),
                        });
                    }
                }
                kernels.extend(list);
            }
        }
        let n_kernels = n_kernels.unwrap_or(0);
        if n_kernels == 0 {
            return Err(Error::Structure("ambiguity set needs N >= 1 kernels".into()));
        }
        Ok(Self {
            n_states,
            n_actions,
            n_kernels,
            kernels,
        })
    }

    /// The same kernels at every `(x, a)`, shared by reference.
    pub fn state_independent(
        n_states: usize,
        n_actions: usize,
        kernels: Vec<Categorical>,
    ) -> Result<Self> {
        let shared: Vec<Arc<Categorical>> = kernels.into_iter().map(Arc::new).collect();
        Self::from_fn(n_states, n_actions, |_, _| shared.clone())
    }

    pub fn n_kernels(&self) -> usize {
        self.n_kernels
    }

    pub fn n_states(&self) -> usize {
        self.n_states
    }

    pub fn n_actions(&self) -> usize {
        self.n_actions
    }

    pub fn kernels(&self, x: usize, a: usize) -> &[Arc<Categorical>] {
        let start = (x * self.n_actions + a) * self.n_kernels;
        &self.kernels[start..start + self.n_kernels]
    }

    pub fn kernel(&self, x: usize, a: usize, k: usize) -> &Categorical {
        &self.kernels(x, a)[k]
    }
}

/// Worst-case kernel at a state-action pair.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WorstCase {
    /// Smallest kernel index attaining the minimum.
    pub index: usize,
    pub value: f64,
}

/// Outcome of [`DiscountedProblem::robust_value_iteration`].
#[derive(Debug, Clone)]
pub struct ValueIteration {
    pub q: QTable,
    /// Number of operator applications performed.
    pub iterations: usize,
    /// `||H q - q||_inf` of the returned table.
    pub residual: f64,
    pub converged: bool,
    /// Residual after each operator application, starting from `Q = 0`.
    pub residuals: Vec<f64>,
}

pub const DEFAULT_TOL: f64 = 1e-10;
pub const DEFAULT_MAX_ITER: usize = 100_000;

/// A robust MDP with finite ambiguity sets and discount `alpha` in `(0, 1)`.
#[derive(Debug, Clone)]
pub struct DiscountedProblem {
    pub states: FiniteStateSpace,
    pub actions: FiniteActionSpace,
    pub rewards: RewardTable,
    pub ambiguity: AmbiguitySet,
    pub alpha: f64,
}

impl DiscountedProblem {
    pub fn new(
        states: FiniteStateSpace,
        actions: FiniteActionSpace,
        rewards: RewardTable,
        ambiguity: AmbiguitySet,
        alpha: f64,
    ) -> Result<Self> {
        if !(alpha > 0.0 && alpha < 1.0) {
            return Err(Error::param("alpha", format!("{alpha} is not in (0, 1)")));
        }
        let (ns, na) = (states.len(), actions.len());
        for (what, expected, actual) in [
            ("reward states", ns, rewards.n_states),
            ("reward actions", na, rewards.n_actions),
            ("ambiguity states", ns, ambiguity.n_states),
            ("ambiguity actions", na, ambiguity.n_actions),
        ] {
            if expected != actual {
                return Err(Error::Dimension {
                    what,
                    expected,
                    actual,
                });
            }
        }
        Ok(Self {
            states,
            actions,
            rewards,
            ambiguity,
            alpha,
        })
    }

    pub fn n_states(&self) -> usize {
        self.states.len()
    }

    pub fn n_actions(&self) -> usize {
        self.actions.len()
    }

    fn check_pair(&self, x: usize, a: usize) -> Result<()> {
        if x >= self.n_states() {
            return Err(Error::Index {
                what: "state",
                index: x,
                size: self.n_states(),
            });
        }
        if a >= self.n_actions() {
            return Err(Error::Index {
                what: "action",
                index: a,
                size: self.n_actions(),
            });
        }
        Ok(())
    }

    fn check_q(&self, q: &QTable) -> Result<()> {
        if q.n_states != self.n_states() || q.n_actions != self.n_actions() {
            return Err(Error::Dimension {
                what: "Q table entries",
                expected: self.n_states() * self.n_actions(),
                actual: q.values.len(),
            });
        }
        Ok(())
    }

    /// `E_dist[r(x, a, X') + alpha * values[X']]`.
    #[inline]
    pub(crate) fn target_with_values(&self, dist: &Categorical, values: &[f64], x: usize, a: usize) -> f64 {
        dist.expect(|y| self.rewards.get(x, a, y) + self.alpha * values[y])
    }

    /// `E_dist[r(x, a, X') + alpha * max_b Q(X', b)]`.
    pub fn expect_target(&self, dist: &Categorical, q: &QTable, x: usize, a: usize) -> Result<f64> {
        if dist.len() != self.n_states() {
            return Err(Error::Dimension {
                what: "distribution length",
                expected: self.n_states(),
                actual: dist.len(),
            });
        }
        self.check_pair(x, a)?;
        self.check_q(q)?;
        Ok(dist.expect(|y| self.rewards.get(x, a, y) + self.alpha * q.row_max(y)))
    }

    pub(crate) fn worst_case_with_values(&self, values: &[f64], x: usize, a: usize) -> WorstCase {
        let mut best = WorstCase {
            index: 0,
            value: f64::INFINITY,
        };
        for (k, dist) in self.ambiguity.kernels(x, a).iter().enumerate() {
            let v = self.target_with_values(dist, values, x, a);
            if v < best.value {
                best = WorstCase { index: k, value: v };
            }
        }
        best
    }

    /// Kernel minimizing the expected bootstrap target at `(x, a)`.
    pub fn worst_case_index(&self, q: &QTable, x: usize, a: usize) -> Result<WorstCase> {
        self.check_pair(x, a)?;
        self.check_q(q)?;
        Ok(self.worst_case_with_values(&q.value_from_q(), x, a))
    }

    /// The robust backup `H Q`.
    pub fn apply_h(&self, q: &QTable) -> QTable {
        self.check_q(q).expect("Q table shape does not match problem");
        let values = q.value_from_q();
        QTable::from_fn(self.n_states(), self.n_actions(), |x, a| {
            self.worst_case_with_values(&values, x, a).value
        })
    }

    /// `(T V)(x) = max_a min_P E_P[r(x, a, X') + alpha * V(X')]`.
    pub fn bellman_t(&self, v: &[f64]) -> Result<Vec<f64>> {
        if v.len() != self.n_states() {
            return Err(Error::Dimension {
                what: "value vector length",
                expected: self.n_states(),
                actual: v.len(),
            });
        }
        Ok((0..self.n_states())
            .map(|x| {
                (0..self.n_actions())
                    .map(|a| self.worst_case_with_values(v, x, a).value)
                    .fold(f64::NEG_INFINITY, f64::max)
            })
            .collect())
    }

    /// Iterates `Q <- H Q` from `Q = 0` until `||H Q - Q||_inf <= tol`.
    ///
    /// Hitting `max_iter` is reported through `converged = false`.
    pub fn robust_value_iteration(&self, tol: f64, max_iter: usize) -> Result<ValueIteration> {
        if !(tol > 0.0) {
            return Err(Error::param("tol", format!("{tol} must be positive")));
        }
        if max_iter == 0 {
            return Err(Error::param("max_iter", "must be at least 1"));
        }
        let mut q = QTable::zeros(self.n_states(), self.n_actions());
        let mut residuals = Vec::new();
        for _ in 0..max_iter {
            let next = self.apply_h(&q);
            let residual = next.sup_distance(&q);
            residuals.push(residual);
            if residual <= tol {
                return Ok(ValueIteration {
                    q,
                    iterations: residuals.len(),
                    residual,
                    converged: true,
                    residuals,
                });
            }
            q = next;
        }
        let residual = self.apply_h(&q).sup_distance(&q);
        Ok(ValueIteration {
            q,
            iterations: max_iter,
            residual,
            converged: residual <= tol,
            residuals,
        })
    }
}
