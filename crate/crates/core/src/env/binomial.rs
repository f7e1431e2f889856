use serde::{Deserialize, Serialize};

use crate::dist::Categorical;
use crate::error::{Error, Result};

/// `Bin(n, p)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BinomialSpec {
    pub n: u32,
    pub p: f64,
}

impl BinomialSpec {
    pub fn new(n: u32, p: f64) -> Result<Self> {
        if n == 0 {
            return Err(Error::param("n", "binomial needs at least one trial"));
        }
        if n > 1000 {
            return Err(Error::param("n", format!("{n} trials exceeds the supported 1000")));
        }
        if !(0.0..=1.0).contains(&p) {
            return Err(Error::param("p", format!("{p} is not in [0, 1]")));
        }
        Ok(Self { n, p })
    }
}

fn choose(n: u32, k: u32) -> f64 {
    let k = k.min(n - k);
    (0..k).fold(1.0, |acc, i| acc * f64::from(n - i) / f64::from(i + 1))
}

/// Probability mass function of `Bin(n, p)` over `{0, ..., n}`.
pub fn binomial_pmf(spec: BinomialSpec) -> Categorical {
    let BinomialSpec { n, p } = spec;
    let q = 1.0 - p;
    let probs = (0..=n)
        .map(|k| choose(n, k) * p.powi(k as i32) * q.powi((n - k) as i32))
        .collect();
    Categorical::new(probs).expect("binomial pmf is normalized")
}

/// Wasserstein-1 distance between `Bin(n, p)` and `Bin(n, q)` on the integer
/// line, as the sum of absolute CDF differences.
pub fn wasserstein1_binomial(p: f64, q: f64, n: u32) -> Result<f64> {
    let a = binomial_pmf(BinomialSpec::new(n, p)?);
    let b = binomial_pmf(BinomialSpec::new(n, q)?);
    let (mut fa, mut fb, mut dist) = (0.0, 0.0, 0.0);
    for k in 0..n as usize {
        fa += a.probs()[k];
        fb += b.probs()[k];
        dist += (fa - fb).abs();
    }
    Ok(dist)
}
