//! Independent reference implementations used as test oracles. Nothing here
//! calls into the operator code it checks.
#![allow(dead_code)]

use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_pcg::Pcg32;
use robustq::{
    AmbiguitySet, Categorical, DiscountedProblem, FiniteActionSpace, FiniteStateSpace, QTable,
    RewardTable,
};

/// `C(n, k)` in exact integer arithmetic.
pub fn choose_exact(n: u64, k: u64) -> u128 {
    (0..k).fold(1u128, |acc, i| acc * (n - i) as u128 / (i + 1) as u128)
}

/// Binomial pmf from exact integer coefficients.
pub fn binom_pmf_ref(n: u64, p: f64) -> Vec<f64> {
    (0..=n)
        .map(|k| choose_exact(n, k) as f64 * p.powi(k as i32) * (1.0 - p).powi((n - k) as i32))
        .collect()
}

pub fn coin_reward_ref(x: usize, a: i64, y: usize) -> f64 {
    if x < y {
        a as f64
    } else if x > y {
        -(a as f64)
    } else {
        -(a.abs() as f64)
    }
}

/// Dense single-kernel MDP: `p[x][a][y]`, `r[x][a][y]`.
#[derive(Debug, Clone)]
pub struct ClassicalMdp {
    pub p: Vec<Vec<Vec<f64>>>,
    pub r: Vec<Vec<Vec<f64>>>,
    pub alpha: f64,
}

impl ClassicalMdp {
    pub fn random(n_states: usize, n_actions: usize, alpha: f64, seed: u64) -> Self {
        let mut rng = Pcg32::seed_from_u64(seed);
        let mut p = vec![vec![vec![0.0; n_states]; n_actions]; n_states];
        let mut r = vec![vec![vec![0.0; n_states]; n_actions]; n_states];
        for x in 0..n_states {
            for a in 0..n_actions {
                let w: Vec<f64> = (0..n_states).map(|_| rng.random::<f64>() + 0.01).collect();
                let total: f64 = w.iter().sum();
                let mut row: Vec<f64> = w.iter().map(|v| v / total).collect();
                let head: f64 = row[..n_states - 1].iter().sum();
                row[n_states - 1] = 1.0 - head;
                p[x][a] = row;
                for y in 0..n_states {
                    r[x][a][y] = rng.random_range(-5.0..5.0);
                }
            }
        }
        Self { p, r, alpha }
    }

    /// Classical Bellman optimality iteration on Q.
    pub fn value_iteration(&self, tol: f64) -> Vec<Vec<f64>> {
        let ns = self.p.len();
        let na = self.p[0].len();
        let mut q = vec![vec![0.0; na]; ns];
        loop {
            let v: Vec<f64> = q
                .iter()
                .map(|row| row.iter().cloned().fold(f64::NEG_INFINITY, f64::max))
                .collect();
            let mut next = vec![vec![0.0; na]; ns];
            let mut diff: f64 = 0.0;
            for x in 0..ns {
                for a in 0..na {
                    let mut s = 0.0;
                    for y in 0..ns {
                        s += self.p[x][a][y] * (self.r[x][a][y] + self.alpha * v[y]);
                    }
                    next[x][a] = s;
                    diff = diff.max((s - q[x][a]).abs());
                }
            }
            if diff <= tol {
                return q;
            }
            q = next;
        }
    }

    pub fn to_problem(&self) -> DiscountedProblem {
        let ns = self.p.len();
        let na = self.p[0].len();
        let rewards = RewardTable::from_fn(ns, na, |x, a, y| self.r[x][a][y]).unwrap();
        let amb = AmbiguitySet::from_fn(ns, na, |x, a| {
            vec![Arc::new(Categorical::new(self.p[x][a].clone()).unwrap())]
        })
        .unwrap();
        DiscountedProblem::new(
            FiniteStateSpace::range(ns).unwrap(),
            FiniteActionSpace::range(na).unwrap(),
            rewards,
            amb,
            self.alpha,
        )
        .unwrap()
    }
}

pub fn q_from_rows(rows: &[Vec<f64>]) -> QTable {
    QTable::from_vec(rows.len(), rows[0].len(), rows.iter().flatten().copied().collect()).unwrap()
}

/// Reads the golden Q table CSV (header, then `state,q...` rows).
pub fn read_golden(text: &str) -> Vec<Vec<f64>> {
    text.lines()
        .skip(1)
        .filter(|l| !l.trim().is_empty())
        .map(|l| l.split(',').skip(1).map(|v| v.parse().unwrap()).collect())
        .collect()
}

pub const TABLE1_P1: [i64; 11] = [1, 1, 1, 1, 1, 0, 0, -1, -1, -1, -1];
pub const TABLE1_P2: [i64; 11] = [1, 1, 1, 0, 0, 0, -1, -1, -1, -1, -1];
pub const TABLE1_P3: [i64; 11] = [1, 1, 1, 1, 0, 0, 0, -1, -1, -1, -1];
pub const TABLE1_P4: [i64; 11] = [1, 1, 1, 0, 0, 0, 0, 0, -1, -1, -1];
pub const TABLE1_NON_ROBUST: [i64; 11] = [1, 1, 1, 1, 1, 0, -1, -1, -1, -1, -1];

/// Cumulative profits over 100 000 rounds, rows P1, P2, P3, P4, non-robust;
/// columns p_true = 0.1, ..., 0.9.
pub const TABLE2: [[f64; 9]; 5] = [
    [-31240., -19121., -4283., 15161., 30484., 29857., 13212., -10339., -29843.],
    [-24424., 5231., 21051., 24613., 22998., 11715., -4984., -18896., -31185.],
    [-30003., -10859., 9843., 21900., 25395., 22587., 9653., -10656., -30301.],
    [-24528., 4263., 16771., 13415., 9925., 13366., 17345., 4731., -24452.],
    [-31101., -18251., -521., 23175., 35244., 23227., -1387., -18421., -31024.],
];

pub const P_TRUE: [f64; 9] = [0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9];

/// Chi-square upper critical values at significance 1e-3, by degrees of freedom.
pub fn chi2_crit_1e3(df: usize) -> f64 {
    const TABLE: [f64; 12] = [
        10.828, 13.816, 16.266, 18.467, 20.515, 22.458, 24.322, 26.124, 27.877, 29.588, 31.264,
        32.909,
    ];
    TABLE[df - 1]
}
