//! Sample-based estimators: empirical log-likelihood, empirical entropy,
//! empirical information, and potential information with a one-sided
//! lower bound and per-observation localization.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};
use thiserror::Error;

use crate::infocore::{self, DiscreteDistribution, GaussianTraitModel};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EstimatorError {
    #[error("sample is empty")]
    EmptySample,
    #[error("sample mixes labelled and real-valued observations")]
    MixedKinds,
    #[error("model assigns zero likelihood to observation {index} ({observation})")]
    ZeroLikelihood { index: usize, observation: String },
    #[error("continuous sample needs at least two observations with non-zero variance")]
    DegenerateSample,
    #[error("confidence must lie in (0, 1), got {0}")]
    InvalidConfidence(f64),
    #[error("tags must align with observations ({observations} observations, {tags} tags)")]
    TagMismatch { observations: usize, tags: usize },
}

/// One observed outcome: a discrete label or a real trait value.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Observation {
    Value(f64),
    Label(String),
}

impl fmt::Display for Observation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Observation::Value(v) => write!(f, "{v}"),
            Observation::Label(l) => f.write_str(l),
        }
    }
}

impl From<&str> for Observation {
    fn from(s: &str) -> Self {
        Observation::Label(s.to_string())
    }
}

impl From<f64> for Observation {
    fn from(v: f64) -> Self {
        Observation::Value(v)
    }
}

/// A probability (discrete) or density (continuous) assigned to an observation.
pub trait Likelihood {
    fn likelihood(&self, obs: &Observation) -> f64;

    fn log2_likelihood(&self, obs: &Observation) -> f64 {
        self.likelihood(obs).log2()
    }
}

impl Likelihood for DiscreteDistribution {
    fn likelihood(&self, obs: &Observation) -> f64 {
        match obs {
            Observation::Label(l) => self.prob(l),
            Observation::Value(_) => 0.0,
        }
    }
}

impl Likelihood for GaussianTraitModel {
    fn likelihood(&self, obs: &Observation) -> f64 {
        match obs {
            Observation::Value(x) => self.density(*x),
            Observation::Label(_) => 0.0,
        }
    }

    fn log2_likelihood(&self, obs: &Observation) -> f64 {
        match obs {
            Observation::Value(x) => self.log2_density(*x),
            Observation::Label(_) => f64::NEG_INFINITY,
        }
    }
}

impl<L: Likelihood + ?Sized> Likelihood for &L {
    fn likelihood(&self, obs: &Observation) -> f64 {
        (**self).likelihood(obs)
    }

    fn log2_likelihood(&self, obs: &Observation) -> f64 {
        (**self).log2_likelihood(obs)
    }
}

/// Observations of a single kind with optional per-observation tags
/// (plant id, replicate id).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObservationSample {
    observations: Vec<Observation>,
    tags: Vec<Option<String>>,
}

impl ObservationSample {
    pub fn new(observations: Vec<Observation>) -> Result<Self, EstimatorError> {
        let tags = vec![None; observations.len()];
        Self::with_tags(observations, tags)
    }

    pub fn with_tags(
        observations: Vec<Observation>,
        tags: Vec<Option<String>>,
    ) -> Result<Self, EstimatorError> {
        if observations.is_empty() {
            return Err(EstimatorError::EmptySample);
        }
        if tags.len() != observations.len() {
            return Err(EstimatorError::TagMismatch {
                observations: observations.len(),
                tags: tags.len(),
            });
        }
        let continuous = matches!(observations[0], Observation::Value(_));
        if observations
            .iter()
            .any(|o| matches!(o, Observation::Value(_)) != continuous)
        {
            return Err(EstimatorError::MixedKinds);
        }
        Ok(Self { observations, tags })
    }

    pub fn labels<S: AsRef<str>>(
        labels: impl IntoIterator<Item = S>,
    ) -> Result<Self, EstimatorError> {
        Self::new(
            labels
                .into_iter()
                .map(|l| Observation::Label(l.as_ref().to_string()))
                .collect(),
        )
    }

    pub fn values(values: impl IntoIterator<Item = f64>) -> Result<Self, EstimatorError> {
        Self::new(values.into_iter().map(Observation::Value).collect())
    }

    pub fn observations(&self) -> &[Observation] {
        &self.observations
    }

    pub fn tags(&self) -> &[Option<String>] {
        &self.tags
    }

    pub fn len(&self) -> usize {
        self.observations.len()
    }

    pub fn is_empty(&self) -> bool {
        self.observations.is_empty()
    }

    pub fn is_continuous(&self) -> bool {
        matches!(self.observations[0], Observation::Value(_))
    }

    /// Counts per label for discrete samples (empty for continuous ones).
    pub fn counts(&self) -> BTreeMap<String, usize> {
        let mut counts = BTreeMap::new();
        for o in &self.observations {
            if let Observation::Label(l) = o {
                *counts.entry(l.clone()).or_insert(0) += 1;
            }
        }
        counts
    }
}

/// Result of a potential-information estimate, in bits per observation.
#[derive(Debug, Clone, PartialEq)]
pub struct IpEstimate {
    pub mean: f64,
    pub lower_bound: f64,
    pub per_observation: Vec<f64>,
    pub confidence: f64,
}

impl IpEstimate {
    /// Total bits over the sample (`mean · n`).
    pub fn total(&self) -> f64 {
        self.mean * self.per_observation.len() as f64
    }

    /// Lower bound scaled to the whole sample.
    pub fn lower_bound_total(&self) -> f64 {
        self.lower_bound * self.per_observation.len() as f64
    }
}

fn log2_likelihoods<L: Likelihood>(
    sample: &ObservationSample,
    model: &L,
) -> Result<Vec<f64>, EstimatorError> {
    sample
        .observations()
        .iter()
        .enumerate()
        .map(|(index, o)| {
            let ll = model.log2_likelihood(o);
            if ll.is_finite() {
                Ok(ll)
            } else {
                Err(EstimatorError::ZeroLikelihood {
                    index,
                    observation: o.to_string(),
                })
            }
        })
        .collect()
}

pub fn empirical_log_likelihood<L: Likelihood>(
    sample: &ObservationSample,
    model: &L,
) -> Result<f64, EstimatorError> {
    let lls = log2_likelihoods(sample, model)?;
    Ok(lls.iter().sum::<f64>() / lls.len() as f64)
}

/// Plug-in entropy for labels; Gaussian fit of the sample variance for values.
pub fn empirical_entropy(sample: &ObservationSample) -> Result<f64, EstimatorError> {
    if sample.is_continuous() {
        let xs: Vec<f64> = sample
            .observations()
            .iter()
            .filter_map(|o| match o {
                Observation::Value(v) => Some(*v),
                Observation::Label(_) => None,
            })
            .collect();
        if xs.len() < 2 {
            return Err(EstimatorError::DegenerateSample);
        }
        let n = xs.len() as f64;
        let mean = xs.iter().sum::<f64>() / n;
        let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
        if var <= 0.0 || !var.is_finite() {
            return Err(EstimatorError::DegenerateSample);
        }
        let fit = GaussianTraitModel::new(mean, var.sqrt())
            .map_err(|_| EstimatorError::DegenerateSample)?;
        Ok(infocore::gaussian_entropy(&fit))
    } else {
        let n = sample.len() as f64;
        let freqs: Vec<f64> = sample.counts().values().map(|&c| c as f64 / n).collect();
        Ok(infocore::entropy_of(&freqs))
    }
}

/// Gain in mean log-likelihood of `model` over `baseline`. Only meaningful on
/// data held out from fitting either model.
pub fn empirical_information<M: Likelihood, B: Likelihood>(
    sample: &ObservationSample,
    model: &M,
    baseline: &B,
) -> Result<f64, EstimatorError> {
    let m = log2_likelihoods(sample, model)?;
    let b = log2_likelihoods(sample, baseline)?;
    Ok(m.iter().zip(&b).map(|(x, y)| x - y).sum::<f64>() / m.len() as f64)
}

pub const DEFAULT_CONFIDENCE: f64 = 0.95;

/// One-sided standard normal quantile.
pub fn z_score(confidence: f64) -> Result<f64, EstimatorError> {
    if !(confidence > 0.0 && confidence < 1.0) {
        return Err(EstimatorError::InvalidConfidence(confidence));
    }
    Ok(Normal::standard().inverse_cdf(confidence))
}

pub fn potential_information<L: Likelihood>(
    sample: &ObservationSample,
    model: &L,
    confidence: f64,
) -> Result<IpEstimate, EstimatorError> {
    let z = z_score(confidence)?;
    let he = empirical_entropy(sample)?;
    let per_observation: Vec<f64> = log2_likelihoods(sample, model)?
        .into_iter()
        .map(|ll| -ll - he)
        .collect();
    let n = per_observation.len() as f64;
    let mean = per_observation.iter().sum::<f64>() / n;
    let lower_bound = if per_observation.len() < 2 {
        f64::NEG_INFINITY
    } else {
        let var = per_observation
            .iter()
            .map(|x| (x - mean).powi(2))
            .sum::<f64>()
            / (n - 1.0);
        mean - z * (var / n).sqrt()
    };
    Ok(IpEstimate {
        mean,
        lower_bound,
        per_observation,
        confidence,
    })
}

/// Indices of the `k` largest per-observation contributions, descending,
/// ties broken by ascending index.
pub fn localize(est: &IpEstimate, k: usize) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..est.per_observation.len()).collect();
    idx.sort_by(|&a, &b| {
        est.per_observation[b]
            .total_cmp(&est.per_observation[a])
            .then(a.cmp(&b))
    });
    idx.truncate(k);
    idx
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, StandardNormal};

    fn ab(p: f64) -> DiscreteDistribution {
        DiscreteDistribution::from_pairs([("a", p), ("b", 1.0 - p)]).unwrap()
    }

    #[test]
    fn log_likelihood_examples() {
        let s = ObservationSample::labels(["a", "a", "a", "a"]).unwrap();
        assert_eq!(empirical_log_likelihood(&s, &ab(0.5)).unwrap(), -1.0);
        let s = ObservationSample::labels(["a", "b"]).unwrap();
        assert_eq!(empirical_log_likelihood(&s, &ab(0.5)).unwrap(), -1.0);
    }

    #[test]
    fn log_likelihood_converges_to_negative_entropy() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let draws: Vec<&str> = (0..1000)
            .map(|_| {
                if rand::Rng::random::<f64>(&mut rng) < 0.9 {
                    "a"
                } else {
                    "b"
                }
            })
            .collect();
        let s = ObservationSample::labels(draws).unwrap();
        let model = ab(0.9);
        let lls = log2_likelihoods(&s, &model).unwrap();
        let mean = lls.iter().sum::<f64>() / 1000.0;
        let sd = (lls.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / 999.0).sqrt();
        let se = sd / 1000f64.sqrt();
        let target = -infocore::entropy(&model);
        assert!((target + 0.4689955935892812).abs() < 1e-12);
        assert!((empirical_log_likelihood(&s, &model).unwrap() - target).abs() < 3.0 * se);
    }

    #[test]
    fn zero_likelihood_names_observation() {
        let s = ObservationSample::labels(["a", "c"]).unwrap();
        let err = empirical_log_likelihood(&s, &ab(0.5)).unwrap_err();
        assert_eq!(
            err,
            EstimatorError::ZeroLikelihood {
                index: 1,
                observation: "c".into()
            }
        );
    }

    #[test]
    fn entropy_examples() {
        let s = ObservationSample::labels(["a", "a", "a", "a"]).unwrap();
        assert_eq!(empirical_entropy(&s).unwrap(), 0.0);
        let s = ObservationSample::labels(["a", "b", "a", "b"]).unwrap();
        assert_eq!(empirical_entropy(&s).unwrap(), 1.0);

        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let xs: Vec<f64> = (0..10_000)
            .map(|_| StandardNormal.sample(&mut rng))
            .collect();
        let h = empirical_entropy(&ObservationSample::values(xs).unwrap()).unwrap();
        assert!((h - 2.047095585180641).abs() < 0.05, "{h}");
    }

    #[test]
    fn entropy_degenerate_continuous() {
        let s = ObservationSample::values([1.0, 1.0, 1.0]).unwrap();
        assert_eq!(empirical_entropy(&s), Err(EstimatorError::DegenerateSample));
        let s = ObservationSample::values([1.0]).unwrap();
        assert_eq!(empirical_entropy(&s), Err(EstimatorError::DegenerateSample));
    }

    #[test]
    fn sample_validation() {
        assert_eq!(
            ObservationSample::new(vec![]),
            Err(EstimatorError::EmptySample)
        );
        assert_eq!(
            ObservationSample::new(vec!["a".into(), 1.0.into()]),
            Err(EstimatorError::MixedKinds)
        );
    }

    #[test]
    fn empirical_information_examples() {
        let s = ObservationSample::labels(["a", "b", "a"]).unwrap();
        assert_eq!(empirical_information(&s, &ab(0.3), &ab(0.3)).unwrap(), 0.0);

        let mut labels = vec!["Wh"; 9];
        labels.push("Pu");
        let s = ObservationSample::labels(labels).unwrap();
        let model = DiscreteDistribution::from_pairs([("Wh", 0.9), ("Pu", 0.1)]).unwrap();
        let base = DiscreteDistribution::from_pairs([("Wh", 0.001), ("Pu", 0.999)]).unwrap();
        let expected = 0.9 * (0.9f64 / 0.001).log2() + 0.1 * (0.1f64 / 0.999).log2();
        let ie = empirical_information(&s, &model, &base).unwrap();
        assert!((ie - expected).abs() < 1e-12);
        assert!((ie - 8.5012).abs() < 1e-3);
    }

    #[test]
    fn potential_information_of_self_sample_is_not_significant() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let xs: Vec<f64> = (0..5000).map(|_| StandardNormal.sample(&mut rng)).collect();
        let s = ObservationSample::values(xs).unwrap();
        let est = potential_information(&s, &GaussianTraitModel::unit(0.0), 0.95).unwrap();
        let n = est.per_observation.len() as f64;
        let sd = (est
            .per_observation
            .iter()
            .map(|x| (x - est.mean).powi(2))
            .sum::<f64>()
            / (n - 1.0))
            .sqrt();
        assert!(est.mean.abs() < 3.0 * sd / n.sqrt());
        assert!(est.lower_bound < 0.0);
        assert!(est.lower_bound <= est.mean);
        let avg = est.per_observation.iter().sum::<f64>() / n;
        assert!((avg - est.mean).abs() < 1e-9);
    }

    #[test]
    fn single_outlier_is_localized_but_not_significant() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut xs: Vec<f64> = (0..100).map(|_| StandardNormal.sample(&mut rng)).collect();
        xs.insert(37, 10.0);
        let s = ObservationSample::values(xs).unwrap();
        let est = potential_information(&s, &GaussianTraitModel::unit(0.0), 0.95).unwrap();
        assert!(est.per_observation[37] > 50.0);
        assert!(est.lower_bound <= 0.0);
        assert_eq!(localize(&est, 1), vec![37]);
    }

    #[test]
    fn localize_breaks_ties_by_index() {
        let est = IpEstimate {
            mean: 1.0,
            lower_bound: 1.0,
            per_observation: vec![1.0; 5],
            confidence: 0.95,
        };
        assert_eq!(localize(&est, 3), vec![0, 1, 2]);
        assert_eq!(localize(&est, 9).len(), 5);
    }

    #[test]
    fn invalid_confidence() {
        let s = ObservationSample::labels(["a", "b"]).unwrap();
        assert_eq!(
            potential_information(&s, &ab(0.5), 1.0),
            Err(EstimatorError::InvalidConfidence(1.0))
        );
    }

    #[test]
    fn entropy_is_shift_invariant() {
        let xs = [0.3, -1.2, 2.5, 0.8, -0.4];
        let a = empirical_entropy(&ObservationSample::values(xs).unwrap()).unwrap();
        let b =
            empirical_entropy(&ObservationSample::values(xs.map(|x| x + 1e3)).unwrap()).unwrap();
        assert!((a - b).abs() < 1e-9);
    }
}
