//! Weighted mixtures of candidate models: posterior likelihood, Bayesian
//! weight updates and the three ways of choosing weights (empirical,
//! uninformative, explicit).

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::estimators::{Likelihood, Observation};
use crate::infocore::{DiscreteDistribution, GaussianTraitModel, OutcomeSpace, MASS_TOLERANCE};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MixtureError {
    #[error("a mixture needs at least one component")]
    Empty,
    #[error("an uninformative prior needs at least two models, got {0}")]
    TooFewModels(usize),
    #[error("duplicate model id `{0}`")]
    DuplicateModel(String),
    #[error("{components} components but {weights} weights")]
    LengthMismatch { components: usize, weights: usize },
    #[error("weights must be non-negative and sum to 1")]
    InvalidWeights,
    #[error("outcome `{0}` has zero probability under every component")]
    ImpossibleOutcome(String),
    #[error("record with outcome `{outcome}` from `{experiment}` matches no model")]
    UnattributableRecord { outcome: String, experiment: String },
    #[error("invalid model: {0}")]
    InvalidModel(String),
}

/// A serializable likelihood model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ModelSpec {
    Discrete {
        labels: Vec<String>,
        probs: Vec<f64>,
    },
    Gaussian {
        mean: f64,
        #[serde(default = "one")]
        sd: f64,
    },
    GaussianMixture {
        weights: Vec<f64>,
        components: Vec<GaussianTraitModel>,
    },
    /// Number of successes out of `trials`, observed as an integer label.
    Binomial { trials: u32, p: f64 },
}

fn one() -> f64 {
    1.0
}

impl ModelSpec {
    pub fn discrete(d: &DiscreteDistribution) -> Self {
        ModelSpec::Discrete {
            labels: d.space().labels().to_vec(),
            probs: d.probs().to_vec(),
        }
    }

    pub fn gaussian(m: &GaussianTraitModel) -> Self {
        ModelSpec::Gaussian {
            mean: m.mean(),
            sd: m.sd(),
        }
    }

    /// Checks parameters; serde alone accepts any numbers.
    pub fn validate(&self) -> Result<(), MixtureError> {
        let bad = |e: &dyn std::fmt::Display| MixtureError::InvalidModel(e.to_string());
        match self {
            ModelSpec::Discrete { labels, probs } => {
                let space = OutcomeSpace::new(labels.iter().cloned()).map_err(|e| bad(&e))?;
                DiscreteDistribution::new(space, probs.clone()).map_err(|e| bad(&e))?;
            }
            ModelSpec::Gaussian { mean, sd } => {
                GaussianTraitModel::new(*mean, *sd).map_err(|e| bad(&e))?;
            }
            ModelSpec::GaussianMixture {
                weights,
                components,
            } => {
                check_weights(weights, components.len())?;
                for c in components {
                    GaussianTraitModel::new(c.mean(), c.sd()).map_err(|e| bad(&e))?;
                }
            }
            ModelSpec::Binomial { p, .. } => {
                if !(0.0..=1.0).contains(p) {
                    return Err(MixtureError::InvalidModel(format!("binomial p = {p}")));
                }
            }
        }
        Ok(())
    }

    pub fn is_continuous(&self) -> bool {
        matches!(
            self,
            ModelSpec::Gaussian { .. } | ModelSpec::GaussianMixture { .. }
        )
    }
}

fn binomial_pmf(trials: u32, p: f64, k: u32) -> f64 {
    if k > trials {
        return 0.0;
    }
    let (n, k) = (trials as f64, k as f64);
    let ln_choose = ln_factorial(n) - ln_factorial(k) - ln_factorial(n - k);
    let term = |x: f64, p: f64| if x == 0.0 { 0.0 } else { x * p.ln() };
    (ln_choose + term(k, p) + term(n - k, 1.0 - p)).exp()
}

fn ln_factorial(n: f64) -> f64 {
    (2..=n as u64).map(|i| (i as f64).ln()).sum()
}

impl Likelihood for ModelSpec {
    fn likelihood(&self, obs: &Observation) -> f64 {
        match (self, obs) {
            (ModelSpec::Discrete { labels, probs }, Observation::Label(l)) => {
                labels.iter().position(|x| x == l).map_or(0.0, |i| probs[i])
            }
            (ModelSpec::Gaussian { mean, sd }, Observation::Value(x)) => {
                GaussianTraitModel::new(*mean, *sd).map_or(0.0, |g| g.density(*x))
            }
            (
                ModelSpec::GaussianMixture {
                    weights,
                    components,
                },
                Observation::Value(x),
            ) => weights
                .iter()
                .zip(components)
                .map(|(w, c)| w * c.density(*x))
                .sum(),
            (ModelSpec::Binomial { trials, p }, Observation::Label(l)) => l
                .parse::<u32>()
                .map_or(0.0, |k| binomial_pmf(*trials, *p, k)),
            _ => 0.0,
        }
    }

    fn log2_likelihood(&self, obs: &Observation) -> f64 {
        match (self, obs) {
            (ModelSpec::Gaussian { mean, sd }, Observation::Value(x)) => {
                GaussianTraitModel::new(*mean, *sd)
                    .map_or(f64::NEG_INFINITY, |g| g.log2_density(*x))
            }
            _ => self.likelihood(obs).log2(),
        }
    }
}

fn check_weights(weights: &[f64], components: usize) -> Result<(), MixtureError> {
    if weights.len() != components {
        return Err(MixtureError::LengthMismatch {
            components,
            weights: weights.len(),
        });
    }
    if weights.iter().any(|w| !(w.is_finite() && *w >= 0.0))
        || (weights.iter().sum::<f64>() - 1.0).abs() > MASS_TOLERANCE
    {
        return Err(MixtureError::InvalidWeights);
    }
    Ok(())
}

/// Named component models with mixture weights.
#[derive(Debug, Clone, PartialEq)]
pub struct HypothesisMixture<M = ModelSpec> {
    ids: Vec<String>,
    models: Vec<M>,
    weights: Vec<f64>,
}

impl<M: Likelihood> HypothesisMixture<M> {
    /// Explicit caller-supplied prior.
    pub fn with_prior(
        components: Vec<(String, M)>,
        weights: Vec<f64>,
    ) -> Result<Self, MixtureError> {
        if components.is_empty() {
            return Err(MixtureError::Empty);
        }
        check_weights(&weights, components.len())?;
        let mut seen = BTreeSet::new();
        let (ids, models): (Vec<_>, Vec<_>) = components.into_iter().unzip();
        for id in &ids {
            if !seen.insert(id.clone()) {
                return Err(MixtureError::DuplicateModel(id.clone()));
            }
        }
        Ok(Self {
            ids,
            models,
            weights,
        })
    }

    /// Equal weights over at least two models.
    pub fn uninformative(components: Vec<(String, M)>) -> Result<Self, MixtureError> {
        let k = components.len();
        if k < 2 {
            return Err(MixtureError::TooFewModels(k));
        }
        Self::with_prior(components, vec![1.0 / k as f64; k])
    }

    /// Laplace-smoothed frequencies `(c + 1) / (n + k)`; a record counts for
    /// the model whose id equals its outcome.
    pub fn empirical(
        components: Vec<(String, M)>,
        history: &ObservationHistory,
    ) -> Result<Self, MixtureError> {
        let ids: Vec<String> = components.iter().map(|(id, _)| id.clone()).collect();
        let weights = empirical_posterior(&ids, history)?;
        Self::with_prior(components, weights)
    }

    pub fn ids(&self) -> &[String] {
        &self.ids
    }

    pub fn models(&self) -> &[M] {
        &self.models
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn weight_of(&self, id: &str) -> Option<f64> {
        self.ids
            .iter()
            .position(|x| x == id)
            .map(|i| self.weights[i])
    }

    pub fn posterior_likelihood(&self, obs: &Observation) -> f64 {
        self.weights
            .iter()
            .zip(&self.models)
            .filter(|(w, _)| **w > 0.0)
            .map(|(w, m)| w * m.likelihood(obs))
            .sum()
    }

    pub fn bayes_update(&self, obs: &Observation) -> Result<Self, MixtureError>
    where
        M: Clone,
    {
        let joint: Vec<f64> = self
            .weights
            .iter()
            .zip(&self.models)
            .map(|(w, m)| if *w > 0.0 { w * m.likelihood(obs) } else { 0.0 })
            .collect();
        let total: f64 = joint.iter().sum();
        if total.is_nan() || total <= 0.0 {
            return Err(MixtureError::ImpossibleOutcome(obs.to_string()));
        }
        Ok(Self {
            ids: self.ids.clone(),
            models: self.models.clone(),
            weights: joint.into_iter().map(|j| j / total).collect(),
        })
    }

    pub fn bayes_update_all<'a>(
        &self,
        obs: impl IntoIterator<Item = &'a Observation>,
    ) -> Result<Self, MixtureError>
    where
        M: Clone,
    {
        obs.into_iter()
            .try_fold(self.clone(), |m, o| m.bayes_update(o))
    }
}

/// Append-only record of (outcome, experiment id) pairs.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ObservationHistory {
    records: Vec<(String, String)>,
}

impl ObservationHistory {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn record(&mut self, outcome: impl Into<String>, experiment: impl Into<String>) {
        self.records.push((outcome.into(), experiment.into()));
    }

    pub fn records(&self) -> &[(String, String)] {
        &self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }
}

pub fn empirical_posterior(
    model_ids: &[String],
    history: &ObservationHistory,
) -> Result<Vec<f64>, MixtureError> {
    if model_ids.is_empty() {
        return Err(MixtureError::Empty);
    }
    let mut counts = vec![0usize; model_ids.len()];
    for (outcome, experiment) in history.records() {
        let i = model_ids.iter().position(|m| m == outcome).ok_or_else(|| {
            MixtureError::UnattributableRecord {
                outcome: outcome.clone(),
                experiment: experiment.clone(),
            }
        })?;
        counts[i] += 1;
    }
    let denom = (history.len() + model_ids.len()) as f64;
    Ok(counts.iter().map(|&c| (c + 1) as f64 / denom).collect())
}
