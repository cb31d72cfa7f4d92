use std::fmt;
use std::sync::Arc;

use rand::distributions::{Distribution as _, WeightedIndex};
use rand::Rng;
use thiserror::Error;

use super::Dataset;
use crate::expr::{EvalError, Expr, Value};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DistributionError {
    #[error("uniform bounds must satisfy low <= high, got [{0}, {1}]")]
    BadUniform(f64, f64),
    #[error("bernoulli probability {0} outside [0, 1]")]
    BadProbability(f64),
    #[error("weights must be finite, non-negative and sum to a positive value")]
    BadWeights,
    #[error("gate distribution must be Bernoulli-type")]
    NotBinary,
    #[error("distribution has empty support")]
    EmptySupport,
    #[error("probability expression failed: {0}")]
    Eval(#[from] EvalError),
}

/// Finite discrete distribution with precomputed sampling table.
#[derive(Debug, Clone)]
pub struct DiscreteFinite {
    values: Vec<f64>,
    weights: Vec<f64>,
    index: WeightedIndex<f64>,
}

impl DiscreteFinite {
    pub fn new(values: Vec<f64>, weights: Vec<f64>) -> Result<Self, DistributionError> {
        if values.is_empty() {
            return Err(DistributionError::EmptySupport);
        }
        if values.len() != weights.len() || weights.iter().any(|w| !w.is_finite() || *w < 0.0) {
            return Err(DistributionError::BadWeights);
        }
        let index = WeightedIndex::new(&weights).map_err(|_| DistributionError::BadWeights)?;
        Ok(Self {
            values,
            weights,
            index,
        })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }
}

impl PartialEq for DiscreteFinite {
    fn eq(&self, other: &Self) -> bool {
        self.values == other.values && self.weights == other.weights
    }
}

/// A sampling object. `N` is the reference type of the state-dependent
/// probability expression (names in model definitions, slots once built).
#[derive(Debug, Clone, PartialEq)]
pub enum Distribution<N = String> {
    Uniform { low: f64, high: f64 },
    Bernoulli { p: f64 },
    Discrete(DiscreteFinite),
    /// Uniform resampling of the dataset's raw values.
    Empirical(Arc<Dataset>),
    /// Bernoulli whose probability is evaluated against the current state and
    /// clamped into [0, 1] at draw time.
    StateBernoulli(Expr<N>),
}

impl<N> Distribution<N> {
    pub fn uniform(low: f64, high: f64) -> Result<Self, DistributionError> {
        if !(low.is_finite() && high.is_finite() && low <= high) {
            return Err(DistributionError::BadUniform(low, high));
        }
        Ok(Distribution::Uniform { low, high })
    }

    pub fn bernoulli(p: f64) -> Result<Self, DistributionError> {
        if !(0.0..=1.0).contains(&p) {
            return Err(DistributionError::BadProbability(p));
        }
        Ok(Distribution::Bernoulli { p })
    }

    pub fn discrete(values: Vec<f64>, weights: Vec<f64>) -> Result<Self, DistributionError> {
        DiscreteFinite::new(values, weights).map(Distribution::Discrete)
    }

    pub fn empirical(dataset: Arc<Dataset>) -> Result<Self, DistributionError> {
        if dataset.values().is_empty() {
            return Err(DistributionError::EmptySupport);
        }
        Ok(Distribution::Empirical(dataset))
    }

    pub fn state_bernoulli(probability: Expr<N>) -> Self {
        Distribution::StateBernoulli(probability)
    }

    /// Checks the variant invariants; used when definitions are assembled
    /// by hand rather than through the constructors.
    pub fn validate(&self) -> Result<(), DistributionError> {
        match self {
            Distribution::Uniform { low, high } => {
                if low.is_finite() && high.is_finite() && low <= high {
                    Ok(())
                } else {
                    Err(DistributionError::BadUniform(*low, *high))
                }
            }
            Distribution::Bernoulli { p } => {
                if (0.0..=1.0).contains(p) {
                    Ok(())
                } else {
                    Err(DistributionError::BadProbability(*p))
                }
            }
            Distribution::Discrete(_) | Distribution::StateBernoulli(_) => Ok(()),
            Distribution::Empirical(ds) => {
                if ds.values().is_empty() {
                    Err(DistributionError::EmptySupport)
                } else {
                    Ok(())
                }
            }
        }
    }

    /// True for variants whose draws are always 0 or 1.
    pub fn is_binary(&self) -> bool {
        matches!(
            self,
            Distribution::Bernoulli { .. } | Distribution::StateBernoulli(_)
        )
    }

    pub fn try_map_refs<M, E>(
        &self,
        f: &mut impl FnMut(&N) -> Result<M, E>,
    ) -> Result<Distribution<M>, E> {
        Ok(match self {
            Distribution::Uniform { low, high } => Distribution::Uniform {
                low: *low,
                high: *high,
            },
            Distribution::Bernoulli { p } => Distribution::Bernoulli { p: *p },
            Distribution::Discrete(d) => Distribution::Discrete(d.clone()),
            Distribution::Empirical(ds) => Distribution::Empirical(ds.clone()),
            Distribution::StateBernoulli(e) => Distribution::StateBernoulli(e.try_map_refs(f)?),
        })
    }

    /// Draws one value. `lookup` resolves references of a state-dependent
    /// probability and is ignored by the other variants.
    pub fn sample<R: Rng + ?Sized>(
        &self,
        rng: &mut R,
        lookup: &impl Fn(&N) -> Option<Value>,
    ) -> Result<f64, DistributionError>
    where
        N: fmt::Display,
    {
        match self {
            Distribution::Uniform { low, high } => {
                if low == high {
                    Ok(*low)
                } else {
                    Ok(low + (high - low) * rng.gen::<f64>())
                }
            }
            Distribution::Bernoulli { p } => Ok(bernoulli_draw(*p, rng)),
            Distribution::Discrete(d) => Ok(d.values[d.index.sample(rng)]),
            Distribution::Empirical(ds) => {
                let values = ds.values();
                if values.is_empty() {
                    return Err(DistributionError::EmptySupport);
                }
                Ok(values[rng.gen_range(0..values.len())])
            }
            Distribution::StateBernoulli(e) => {
                let p = e.eval(lookup)?.as_f64();
                let p = if p.is_nan() { 0.0 } else { p.clamp(0.0, 1.0) };
                Ok(bernoulli_draw(p, rng))
            }
        }
    }
}

fn bernoulli_draw<R: Rng + ?Sized>(p: f64, rng: &mut R) -> f64 {
    // gen::<f64>() is in [0, 1): p = 0 never succeeds, p = 1 always does.
    if rng.gen::<f64>() < p {
        1.0
    } else {
        0.0
    }
}

/// Samples a name-based distribution against a `(name, value)` environment.
pub fn sample<R: Rng + ?Sized>(
    distribution: &Distribution,
    rng: &mut R,
    env: &[(&str, Value)],
) -> Result<f64, DistributionError> {
    distribution.sample(rng, &|n: &String| {
        env.iter().find(|(k, _)| *k == n.as_str()).map(|(_, v)| *v)
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::{int, real, var};
    use crate::stochastics::rng_stream;

    fn draws(d: &Distribution, n: usize, seed: u64) -> Vec<f64> {
        let mut rng = rng_stream(seed, 0);
        (0..n).map(|_| sample(d, &mut rng, &[]).unwrap()).collect()
    }

    #[test]
    fn singleton_empirical() {
        let ds = Arc::new(Dataset::from_values("one", vec![600.0]).unwrap());
        let d = Distribution::empirical(ds).unwrap();
        assert!(draws(&d, 200, 1).iter().all(|x| *x == 600.0));
    }

    #[test]
    fn degenerate_uniform() {
        let d = Distribution::uniform(3.0, 3.0).unwrap();
        assert!(draws(&d, 50, 2).iter().all(|x| *x == 3.0));
    }

    #[test]
    fn uniform_stays_in_bounds() {
        let d = Distribution::uniform(-2.0, 5.0).unwrap();
        assert!(draws(&d, 5000, 3).iter().all(|x| (-2.0..=5.0).contains(x)));
    }

    #[test]
    fn empirical_three_values_frequency_band() {
        // 99.9% binomial band for p = 1/3, n = 30000 is 1/3 +- 0.0089, which
        // rounds to [0.323, 0.343].
        let ds = Arc::new(Dataset::from_values("three", vec![1.0, 2.0, 3.0]).unwrap());
        let d = Distribution::empirical(ds).unwrap();
        let xs = draws(&d, 30_000, 11);
        for v in [1.0, 2.0, 3.0] {
            let f = xs.iter().filter(|x| **x == v).count() as f64 / xs.len() as f64;
            assert!((0.323..=0.343).contains(&f), "value {v}: frequency {f}");
        }
    }

    #[test]
    fn discrete_respects_weights() {
        let d = Distribution::discrete(vec![0.0, 10.0], vec![0.0, 2.0]).unwrap();
        assert!(draws(&d, 500, 4).iter().all(|x| *x == 10.0));
        assert!(Distribution::<String>::discrete(vec![1.0], vec![0.0]).is_err());
        assert!(Distribution::<String>::discrete(vec![1.0], vec![-1.0]).is_err());
    }

    #[test]
    fn invalid_parameters() {
        assert!(Distribution::<String>::uniform(2.0, 1.0).is_err());
        assert!(Distribution::<String>::bernoulli(1.5).is_err());
        assert!(Distribution::<String>::bernoulli(-0.1).is_err());
    }

    #[test]
    fn degenerate_bernoulli() {
        let one = Distribution::bernoulli(1.0).unwrap();
        let zero = Distribution::bernoulli(0.0).unwrap();
        assert!(draws(&one, 1000, 5).iter().all(|x| *x == 1.0));
        assert!(draws(&zero, 1000, 5).iter().all(|x| *x == 0.0));
    }

    #[test]
    fn state_bernoulli_clamps() {
        let mut rng = rng_stream(9, 0);
        let high = Distribution::state_bernoulli(var("p").mul(int(10)));
        let low = Distribution::state_bernoulli(real(-3.0));
        for _ in 0..500 {
            assert_eq!(sample(&high, &mut rng, &[("p", Value::Real(0.5))]).unwrap(), 1.0);
            assert_eq!(sample(&low, &mut rng, &[]).unwrap(), 0.0);
        }
    }

    #[test]
    fn state_bernoulli_unbound_name_is_an_error() {
        let mut rng = rng_stream(9, 0);
        let d = Distribution::state_bernoulli(var("p"));
        assert!(matches!(sample(&d, &mut rng, &[]), Err(DistributionError::Eval(_))));
    }

    #[test]
    fn empirical_chi_square_uniform_over_indices() {
        // 10 cells, 9 degrees of freedom; the 0.001 critical value is 27.877.
        let values: Vec<f64> = (0..10).map(|i| i as f64 * 7.5).collect();
        let ds = Arc::new(Dataset::from_values("ten", values.clone()).unwrap());
        let d = Distribution::empirical(ds).unwrap();
        let n = 100_000;
        let xs = draws(&d, n, 99);
        let expected = n as f64 / 10.0;
        let chi2: f64 = values
            .iter()
            .map(|v| {
                let obs = xs.iter().filter(|x| *x == v).count() as f64;
                (obs - expected).powi(2) / expected
            })
            .sum();
        assert!(chi2 < 27.877, "chi2 = {chi2}");
    }
}
