//! Exact information-theoretic primitives on finite discrete distributions
//! and unit-variance Gaussian trait models.
//!
//! Every value returned here is in bits. `0 · log 0` is taken as `0`; a
//! reference distribution that assigns zero mass where the other does not is
//! reported as [`InfoError::AbsoluteContinuity`] rather than an infinity.

use std::collections::HashSet;
use std::f64::consts::{E, PI};

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Tolerance on the total mass of a distribution.
pub const MASS_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum InfoError {
    #[error("outcome space must be non-empty")]
    EmptySpace,
    #[error("duplicate outcome label `{0}`")]
    DuplicateLabel(String),
    #[error("expected {expected} probabilities, got {got}")]
    LengthMismatch { expected: usize, got: usize },
    #[error("probability {value} at `{label}` is outside [0, 1]")]
    InvalidProbability { label: String, value: f64 },
    #[error("probabilities sum to {0}, not 1")]
    NotNormalized(f64),
    #[error("distributions are defined over different outcome spaces")]
    SpaceMismatch,
    #[error("p puts mass on `{0}` where q has none")]
    AbsoluteContinuity(String),
    #[error("standard deviation must be positive and finite, got {0}")]
    InvalidSd(f64),
    #[error("unknown outcome label `{0}`")]
    UnknownLabel(String),
}

/// Ordered, unique outcome labels. The order defines vector indexing.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "Vec<String>", into = "Vec<String>")]
pub struct OutcomeSpace {
    labels: Vec<String>,
}

impl OutcomeSpace {
    pub fn new<I, S>(labels: I) -> Result<Self, InfoError>
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let labels: Vec<String> = labels.into_iter().map(Into::into).collect();
        if labels.is_empty() {
            return Err(InfoError::EmptySpace);
        }
        let mut seen = HashSet::new();
        for l in &labels {
            if !seen.insert(l.as_str()) {
                return Err(InfoError::DuplicateLabel(l.clone()));
            }
        }
        Ok(Self { labels })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn index_of(&self, label: &str) -> Option<usize> {
        self.labels.iter().position(|l| l == label)
    }
}

impl TryFrom<Vec<String>> for OutcomeSpace {
    type Error = InfoError;
    fn try_from(v: Vec<String>) -> Result<Self, Self::Error> {
        Self::new(v)
    }
}

impl From<OutcomeSpace> for Vec<String> {
    fn from(s: OutcomeSpace) -> Self {
        s.labels
    }
}

/// A probability vector aligned with an [`OutcomeSpace`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawDistribution", into = "RawDistribution")]
pub struct DiscreteDistribution {
    space: OutcomeSpace,
    probs: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawDistribution {
    labels: Vec<String>,
    probs: Vec<f64>,
}

impl TryFrom<RawDistribution> for DiscreteDistribution {
    type Error = InfoError;
    fn try_from(raw: RawDistribution) -> Result<Self, Self::Error> {
        DiscreteDistribution::new(OutcomeSpace::new(raw.labels)?, raw.probs)
    }
}

impl From<DiscreteDistribution> for RawDistribution {
    fn from(d: DiscreteDistribution) -> Self {
        RawDistribution {
            labels: d.space.labels,
            probs: d.probs,
        }
    }
}

impl DiscreteDistribution {
    pub fn new(space: OutcomeSpace, probs: Vec<f64>) -> Result<Self, InfoError> {
        if probs.len() != space.len() {
            return Err(InfoError::LengthMismatch {
                expected: space.len(),
                got: probs.len(),
            });
        }
        for (label, &p) in space.labels().iter().zip(&probs) {
            if !(0.0..=1.0).contains(&p) {
                return Err(InfoError::InvalidProbability {
                    label: label.clone(),
                    value: p,
                });
            }
        }
        let total: f64 = probs.iter().sum();
        if (total - 1.0).abs() > MASS_TOLERANCE {
            return Err(InfoError::NotNormalized(total));
        }
        Ok(Self { space, probs })
    }

    /// Builds a distribution from `(label, probability)` pairs in order.
    pub fn from_pairs<S: Into<String>>(
        pairs: impl IntoIterator<Item = (S, f64)>,
    ) -> Result<Self, InfoError> {
        let (labels, probs): (Vec<String>, Vec<f64>) =
            pairs.into_iter().map(|(l, p)| (l.into(), p)).unzip();
        Self::new(OutcomeSpace::new(labels)?, probs)
    }

    /// All mass on `label`.
    pub fn point(space: &OutcomeSpace, label: &str) -> Result<Self, InfoError> {
        let idx = space
            .index_of(label)
            .ok_or_else(|| InfoError::UnknownLabel(label.to_string()))?;
        let mut probs = vec![0.0; space.len()];
        probs[idx] = 1.0;
        Self::new(space.clone(), probs)
    }

    pub fn uniform(space: &OutcomeSpace) -> Self {
        let n = space.len() as f64;
        Self {
            space: space.clone(),
            probs: vec![1.0 / n; space.len()],
        }
    }

    pub fn space(&self) -> &OutcomeSpace {
        &self.space
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    /// Probability of `label`; zero for labels outside the space.
    pub fn prob(&self, label: &str) -> f64 {
        self.space.index_of(label).map_or(0.0, |i| self.probs[i])
    }
}

/// A Gaussian trait cluster. The standard deviation defaults to one trait unit.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawGaussian", into = "RawGaussian")]
pub struct GaussianTraitModel {
    mean: f64,
    sd: f64,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawGaussian {
    mean: f64,
    #[serde(default = "unit_sd")]
    sd: f64,
}

fn unit_sd() -> f64 {
    1.0
}

impl TryFrom<RawGaussian> for GaussianTraitModel {
    type Error = InfoError;
    fn try_from(raw: RawGaussian) -> Result<Self, Self::Error> {
        GaussianTraitModel::new(raw.mean, raw.sd)
    }
}

impl From<GaussianTraitModel> for RawGaussian {
    fn from(g: GaussianTraitModel) -> Self {
        RawGaussian {
            mean: g.mean,
            sd: g.sd,
        }
    }
}

impl GaussianTraitModel {
    pub fn new(mean: f64, sd: f64) -> Result<Self, InfoError> {
        if !(sd > 0.0 && sd.is_finite()) || !mean.is_finite() {
            return Err(InfoError::InvalidSd(sd));
        }
        Ok(Self { mean, sd })
    }

    pub fn unit(mean: f64) -> Self {
        Self { mean, sd: 1.0 }
    }

    pub fn mean(&self) -> f64 {
        self.mean
    }

    pub fn sd(&self) -> f64 {
        self.sd
    }

    pub fn density(&self, x: f64) -> f64 {
        let z = (x - self.mean) / self.sd;
        (-0.5 * z * z).exp() / (self.sd * (2.0 * PI).sqrt())
    }

    /// `log2` of the density, exact in the tails where `density` underflows.
    pub fn log2_density(&self, x: f64) -> f64 {
        let z = (x - self.mean) / self.sd;
        (-0.5 * z * z - (self.sd * (2.0 * PI).sqrt()).ln()) / std::f64::consts::LN_2
    }
}

/// Joint distribution of hidden states (rows) and observables (columns).
#[derive(Debug, Clone, PartialEq)]
pub struct JointDistribution {
    row_space: OutcomeSpace,
    col_space: OutcomeSpace,
    probs: Vec<Vec<f64>>,
}

impl JointDistribution {
    pub fn new(
        row_space: OutcomeSpace,
        col_space: OutcomeSpace,
        probs: Vec<Vec<f64>>,
    ) -> Result<Self, InfoError> {
        if probs.len() != row_space.len() {
            return Err(InfoError::LengthMismatch {
                expected: row_space.len(),
                got: probs.len(),
            });
        }
        let mut total = 0.0;
        for (r, row) in probs.iter().enumerate() {
            if row.len() != col_space.len() {
                return Err(InfoError::LengthMismatch {
                    expected: col_space.len(),
                    got: row.len(),
                });
            }
            for (c, &p) in row.iter().enumerate() {
                if !(0.0..=1.0).contains(&p) {
                    return Err(InfoError::InvalidProbability {
                        label: format!("{}|{}", row_space.labels()[r], col_space.labels()[c]),
                        value: p,
                    });
                }
                total += p;
            }
        }
        if (total - 1.0).abs() > MASS_TOLERANCE {
            return Err(InfoError::NotNormalized(total));
        }
        Ok(Self {
            row_space,
            col_space,
            probs,
        })
    }

    pub fn row_space(&self) -> &OutcomeSpace {
        &self.row_space
    }

    pub fn col_space(&self) -> &OutcomeSpace {
        &self.col_space
    }

    pub fn probs(&self) -> &[Vec<f64>] {
        &self.probs
    }

    pub fn row_marginal(&self) -> Vec<f64> {
        self.probs.iter().map(|r| r.iter().sum()).collect()
    }

    pub fn col_marginal(&self) -> Vec<f64> {
        let mut m = vec![0.0; self.col_space.len()];
        for row in &self.probs {
            for (acc, p) in m.iter_mut().zip(row) {
                *acc += p;
            }
        }
        m
    }
}

/// `-Σ p log2 p` over a raw probability slice.
pub fn entropy_of(probs: &[f64]) -> f64 {
    let h: f64 = probs
        .iter()
        .filter(|&&p| p > 0.0)
        .map(|&p| -p * p.log2())
        .sum();
    h.max(0.0)
}

/// `Σ p log2(p/q)` over aligned raw slices. On failure of absolute continuity
/// the offending index is returned.
pub fn relative_entropy_of(p: &[f64], q: &[f64]) -> Result<f64, usize> {
    let mut d = 0.0;
    for (i, (&pi, &qi)) in p.iter().zip(q).enumerate() {
        if pi > 0.0 {
            if qi <= 0.0 {
                return Err(i);
            }
            d += pi * (pi / qi).log2();
        }
    }
    Ok(d.max(0.0))
}

pub fn entropy(d: &DiscreteDistribution) -> f64 {
    entropy_of(d.probs())
}

pub fn relative_entropy(
    p: &DiscreteDistribution,
    q: &DiscreteDistribution,
) -> Result<f64, InfoError> {
    if p.space() != q.space() {
        return Err(InfoError::SpaceMismatch);
    }
    relative_entropy_of(p.probs(), q.probs())
        .map_err(|i| InfoError::AbsoluteContinuity(p.space().labels()[i].clone()))
}

pub fn mutual_information(j: &JointDistribution) -> f64 {
    let rows = j.row_marginal();
    let cols = j.col_marginal();
    let mut mi = 0.0;
    for (r, row) in j.probs().iter().enumerate() {
        for (c, &p) in row.iter().enumerate() {
            if p > 0.0 {
                mi += p * (p / (rows[r] * cols[c])).log2();
            }
        }
    }
    mi.max(0.0)
}

/// Differential entropy `½ log2(2πe σ²)`.
pub fn gaussian_entropy(g: &GaussianTraitModel) -> f64 {
    0.5 * (2.0 * PI * E * g.sd() * g.sd()).log2()
}
