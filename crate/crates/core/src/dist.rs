use serde::Serialize;

use crate::error::{Error, Result};

/// Absolute tolerance on the total mass of a [`Categorical`].
pub const PROB_TOL: f64 = 1e-12;

/// A probability vector over a finite state space.
///
/// Inputs that are not normalized within [`PROB_TOL`] are rejected rather than
/// renormalized.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Categorical {
    probs: Vec<f64>,
}

impl Categorical {
    pub fn new(probs: Vec<f64>) -> Result<Self> {
        if probs.is_empty() {
            return Err(Error::Distribution("empty probability vector".into()));
        }
        for (i, &p) in probs.iter().enumerate() {
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::Distribution(format!(
                    "entry {i} = {p} is outside [0, 1]"
                )));
            }
        }
        let total: f64 = probs.iter().sum();
        if (total - 1.0).abs() > PROB_TOL {
            return Err(Error::Distribution(format!(
                "entries sum to {total}, not 1"
            )));
        }
        Ok(Self { probs })
    }

    pub fn point_mass(len: usize, at: usize) -> Result<Self> {
        if at >= len {
            return Err(Error::Index {
                what: "point mass",
                index: at,
                size: len,
            });
        }
        let mut probs = vec![0.0; len];
        probs[at] = 1.0;
        Ok(Self { probs })
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn len(&self) -> usize {
        self.probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probs.is_empty()
    }

    /// Expectation of `f` over the support.
    pub fn expect(&self, mut f: impl FnMut(usize) -> f64) -> f64 {
        self.probs
            .iter()
            .enumerate()
            .filter(|(_, &p)| p > 0.0)
            .map(|(j, &p)| p * f(j))
            .sum()
    }

    /// Inverse-CDF draw from a uniform `u` in `[0, 1)`.
    ///
    /// Rounding slack at the top of the CDF falls on the last state with
    /// positive mass, so zero-probability states are never returned.
    pub fn sample_with(&self, u: f64) -> usize {
        let mut cum = 0.0;
        let mut last = 0;
        for (i, &p) in self.probs.iter().enumerate() {
            if p > 0.0 {
                cum += p;
                last = i;
                if u < cum {
                    return i;
                }
            }
        }
        last
    }

    pub fn sample<R: rand::Rng + ?Sized>(&self, rng: &mut R) -> usize {
        self.sample_with(rng.random::<f64>())
    }

    pub fn mean(&self) -> f64 {
        self.expect(|j| j as f64)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn validates_mass() {
        assert!(Categorical::new(vec![0.5, 0.5]).is_ok());
        assert!(Categorical::new(vec![0.5, 0.4]).is_err());
        assert!(Categorical::new(vec![1.5, -0.5]).is_err());
        assert!(Categorical::new(vec![]).is_err());
        assert!(Categorical::new(vec![0.5, 0.5 + 1e-13]).is_ok());
    }

    #[test]
    fn sampling_skips_zero_mass() {
        let d = Categorical::new(vec![0.0, 0.25, 0.0, 0.75, 0.0]).unwrap();
        assert_eq!(d.sample_with(0.0), 1);
        assert_eq!(d.sample_with(0.2499), 1);
        assert_eq!(d.sample_with(0.25), 3);
        assert_eq!(d.sample_with(0.999_999_999_999), 3);
        assert_eq!(d.sample_with(1.0), 3);
    }
}
