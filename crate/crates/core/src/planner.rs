//! Expected-information scoring of experiment designs: replicate yield
//! curves, technical failure and controls, targeted weighting and cost.

use std::cmp::Ordering;
use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::estimators::Likelihood;
use crate::infocore::{self, DiscreteDistribution, InfoError, JointDistribution, OutcomeSpace};
use crate::mixtures::{HypothesisMixture, MixtureError};

/// Largest outcome-sequence count enumerated for the full-sequence statistic.
pub const MAX_SEQUENCE_STATES: f64 = 1e6;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PlannerError {
    #[error("design `{0}` has no hypotheses")]
    NoHypotheses(String),
    #[error("design `{design}`: hypothesis `{model}` uses a different outcome space")]
    SpaceMismatch { design: String, model: String },
    #[error("replicate count must be at least 1")]
    ZeroReplicates,
    #[error("costs must be finite and non-negative")]
    InvalidCost,
    #[error("design `{design}` has no outcome distribution for model `{model}`")]
    MissingHypothesis { design: String, model: String },
    #[error("full-sequence statistic needs {states:e} states (limit 1e6)")]
    Intractable { states: f64 },
    #[error("design `{0}` has zero total cost")]
    ZeroCost(String),
    #[error("{name} must lie in [0, 1], got {value}")]
    InvalidProbability { name: &'static str, value: f64 },
    #[error("absolute continuity fails for model `{0}`")]
    AbsoluteContinuity(String),
    #[error(transparent)]
    Info(#[from] InfoError),
    #[error(transparent)]
    Mixture(#[from] MixtureError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SufficientStatistic {
    #[default]
    Counts,
    FullSequence,
}

/// Per-hypothesis predictions for one replicate of an experiment, plus
/// replicate count, statistic and costs.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentDesign {
    pub id: String,
    hypothesis_outcomes: BTreeMap<String, DiscreteDistribution>,
    replicates: usize,
    pub statistic: SufficientStatistic,
    pub controls: BTreeSet<String>,
    setup_cost: f64,
    replicate_cost: f64,
}

impl ExperimentDesign {
    pub fn new(
        id: impl Into<String>,
        hypothesis_outcomes: BTreeMap<String, DiscreteDistribution>,
        replicates: usize,
    ) -> Result<Self, PlannerError> {
        let id = id.into();
        let mut iter = hypothesis_outcomes.iter();
        let (_, first) = iter
            .next()
            .ok_or_else(|| PlannerError::NoHypotheses(id.clone()))?;
        for (model, d) in iter {
            if d.space() != first.space() {
                return Err(PlannerError::SpaceMismatch {
                    design: id,
                    model: model.clone(),
                });
            }
        }
        if replicates == 0 {
            return Err(PlannerError::ZeroReplicates);
        }
        Ok(Self {
            id,
            hypothesis_outcomes,
            replicates,
            statistic: SufficientStatistic::Counts,
            controls: BTreeSet::new(),
            setup_cost: 0.0,
            replicate_cost: 1.0,
        })
    }

    pub fn with_statistic(mut self, statistic: SufficientStatistic) -> Self {
        self.statistic = statistic;
        self
    }

    pub fn with_control(mut self, control: impl Into<String>) -> Self {
        self.controls.insert(control.into());
        self
    }

    pub fn with_costs(mut self, setup: f64, per_replicate: f64) -> Result<Self, PlannerError> {
        if !(setup.is_finite() && per_replicate.is_finite() && setup >= 0.0 && per_replicate >= 0.0)
        {
            return Err(PlannerError::InvalidCost);
        }
        self.setup_cost = setup;
        self.replicate_cost = per_replicate;
        Ok(self)
    }

    pub fn with_replicates(mut self, n: usize) -> Result<Self, PlannerError> {
        if n == 0 {
            return Err(PlannerError::ZeroReplicates);
        }
        self.replicates = n;
        Ok(self)
    }

    pub fn replicates(&self) -> usize {
        self.replicates
    }

    pub fn hypothesis_outcomes(&self) -> &BTreeMap<String, DiscreteDistribution> {
        &self.hypothesis_outcomes
    }

    pub fn space(&self) -> &OutcomeSpace {
        self.hypothesis_outcomes
            .values()
            .next()
            .expect("validated non-empty")
            .space()
    }

    pub fn setup_cost(&self) -> f64 {
        self.setup_cost
    }

    pub fn replicate_cost(&self) -> f64 {
        self.replicate_cost
    }

    pub fn total_cost(&self) -> f64 {
        self.setup_cost + self.replicates as f64 * self.replicate_cost
    }
}

/// Distributions of the replicate statistic, one row per requested model,
/// columns over a shared enumeration of the statistic's values.
fn replicate_table(
    design: &ExperimentDesign,
    models: &[&str],
) -> Result<Vec<Vec<f64>>, PlannerError> {
    let per_rep: Vec<&[f64]> = models
        .iter()
        .map(|m| {
            design
                .hypothesis_outcomes
                .get(*m)
                .map(|d| d.probs())
                .ok_or_else(|| PlannerError::MissingHypothesis {
                    design: design.id.clone(),
                    model: m.to_string(),
                })
        })
        .collect::<Result<_, _>>()?;
    let k = design.space().len();
    let n = design.replicates;
    match design.statistic {
        SufficientStatistic::Counts => Ok(count_table(&per_rep, k, n)),
        SufficientStatistic::FullSequence => {
            let states = (k as f64).powi(n as i32);
            if states > MAX_SEQUENCE_STATES {
                return Err(PlannerError::Intractable { states });
            }
            Ok(sequence_table(&per_rep, k, n, states as usize))
        }
    }
}

fn count_table(per_rep: &[&[f64]], k: usize, n: usize) -> Vec<Vec<f64>> {
    let mut ln_fact = vec![0.0f64; n + 1];
    for i in 1..=n {
        ln_fact[i] = ln_fact[i - 1] + (i as f64).ln();
    }
    let ln_p: Vec<Vec<f64>> = per_rep
        .iter()
        .map(|ps| ps.iter().map(|p| p.ln()).collect())
        .collect();
    let mut rows = vec![Vec::new(); per_rep.len()];
    let mut counts = vec![0usize; k];
    compositions(n, 0, &mut counts, &mut |c| {
        let ln_coef = ln_fact[n] - c.iter().map(|&ci| ln_fact[ci]).sum::<f64>();
        for (row, lp) in rows.iter_mut().zip(&ln_p) {
            let mut ln = ln_coef;
            for (&ci, &l) in c.iter().zip(lp) {
                if ci > 0 {
                    ln += ci as f64 * l;
                }
            }
            row.push(if ln == f64::NEG_INFINITY {
                0.0
            } else {
                ln.exp()
            });
        }
    });
    rows
}

fn compositions(remaining: usize, slot: usize, counts: &mut [usize], f: &mut impl FnMut(&[usize])) {
    if slot + 1 == counts.len() {
        counts[slot] = remaining;
        f(counts);
        return;
    }
    for c in 0..=remaining {
        counts[slot] = c;
        compositions(remaining - c, slot + 1, counts, f);
    }
}

fn sequence_table(per_rep: &[&[f64]], k: usize, n: usize, states: usize) -> Vec<Vec<f64>> {
    per_rep
        .iter()
        .map(|ps| {
            (0..states)
                .map(|mut s| {
                    let mut p = 1.0;
                    for _ in 0..n {
                        p *= ps[s % k];
                        s /= k;
                    }
                    p
                })
                .collect()
        })
        .collect()
}

struct Evaluated {
    ids: Vec<String>,
    weights: Vec<f64>,
    rows: Vec<Vec<f64>>,
    prediction: Vec<f64>,
}

fn evaluate<M: Likelihood>(
    design: &ExperimentDesign,
    m: &HypothesisMixture<M>,
) -> Result<Evaluated, PlannerError> {
    let (ids, weights): (Vec<String>, Vec<f64>) = m
        .ids()
        .iter()
        .zip(m.weights())
        .filter(|(_, w)| **w > 0.0)
        .map(|(id, w)| (id.clone(), *w))
        .unzip();
    let names: Vec<&str> = ids.iter().map(String::as_str).collect();
    let rows = replicate_table(design, &names)?;
    let cols = rows.first().map_or(0, Vec::len);
    let mut prediction = vec![0.0; cols];
    for (row, w) in rows.iter().zip(&weights) {
        for (acc, p) in prediction.iter_mut().zip(row) {
            *acc += w * p;
        }
    }
    Ok(Evaluated {
        ids,
        weights,
        rows,
        prediction,
    })
}

fn divergence(row: &[f64], prediction: &[f64], id: &str) -> Result<f64, PlannerError> {
    infocore::relative_entropy_of(row, prediction)
        .map_err(|_| PlannerError::AbsoluteContinuity(id.to_string()))
}

/// Weighted mean divergence of each hypothesis' outcome distribution from the
/// weight-averaged prediction, over the design's replicate statistic.
pub fn expectation_ip<M: Likelihood>(
    design: &ExperimentDesign,
    m: &HypothesisMixture<M>,
) -> Result<f64, PlannerError> {
    if predictions_agree(design, m)? {
        return Ok(0.0);
    }
    let ev = evaluate(design, m)?;
    let mut total = 0.0;
    for ((row, w), id) in ev.rows.iter().zip(&ev.weights).zip(&ev.ids) {
        total += w * divergence(row, &ev.prediction, id)?;
    }
    Ok(total)
}

/// True when every positively weighted model predicts the same replicate
/// distribution, so the design scores exactly 0.
fn predictions_agree<M: Likelihood>(
    design: &ExperimentDesign,
    m: &HypothesisMixture<M>,
) -> Result<bool, PlannerError> {
    let mut first: Option<&[f64]> = None;
    for (id, _) in m.ids().iter().zip(m.weights()).filter(|(_, w)| **w > 0.0) {
        let probs = design
            .hypothesis_outcomes
            .get(id)
            .ok_or_else(|| PlannerError::MissingHypothesis {
                design: design.id.clone(),
                model: id.clone(),
            })?
            .probs();
        match first {
            None => first = Some(probs),
            Some(f) if f != probs => return Ok(false),
            Some(_) => {}
        }
    }
    Ok(true)
}

/// Divergence of one model's outcome distribution from the averaged prediction.
pub fn component_divergence<M: Likelihood>(
    design: &ExperimentDesign,
    m: &HypothesisMixture<M>,
    model: &str,
) -> Result<f64, PlannerError> {
    let ev = evaluate(design, m)?;
    let row = replicate_table(design, &[model])?.remove(0);
    divergence(&row, &ev.prediction, model)
}

/// Entropy of the weights: the score of any design whose hypotheses predict
/// pairwise disjoint outcomes.
pub fn disambiguation_value<M: Likelihood>(m: &HypothesisMixture<M>) -> f64 {
    infocore::entropy_of(m.weights())
}

pub fn targeted_ip(e_ip: f64, tau: f64) -> Result<f64, PlannerError> {
    check_probability("tau", tau)?;
    Ok(tau * e_ip)
}

pub fn efficiency(e_ip: f64, design: &ExperimentDesign) -> Result<f64, PlannerError> {
    let cost = design.total_cost();
    if cost <= 0.0 {
        return Err(PlannerError::ZeroCost(design.id.clone()));
    }
    Ok(e_ip / cost)
}

fn check_probability(name: &'static str, value: f64) -> Result<(), PlannerError> {
    if (0.0..=1.0).contains(&value) {
        Ok(())
    } else {
        Err(PlannerError::InvalidProbability { name, value })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct YieldCurve {
    pub points: Vec<(usize, f64)>,
    /// Gain from each additional replicate; the first entry is the n = 1 value.
    pub rates: Vec<f64>,
    pub capacity: f64,
    /// Upper bound on the capacity.
    pub bound: f64,
}

impl YieldCurve {
    fn from_points(points: Vec<(usize, f64)>, bound: f64) -> Self {
        let mut prev = 0.0;
        let rates = points
            .iter()
            .map(|&(_, v)| {
                let r = v - prev;
                prev = v;
                r
            })
            .collect();
        let capacity = points.last().map_or(0.0, |p| p.1);
        Self {
            points,
            rates,
            capacity,
            bound,
        }
    }

    pub fn values(&self) -> Vec<f64> {
        self.points.iter().map(|p| p.1).collect()
    }

    pub fn value_at(&self, n: usize) -> Option<f64> {
        self.points.iter().find(|p| p.0 == n).map(|p| p.1)
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("n,e_ip_bits,rate_bits_per_replicate\n");
        for (&(n, v), r) in self.points.iter().zip(&self.rates) {
            let _ = writeln!(out, "{n},{v},{r}");
        }
        out
    }
}

/// E(Ip) for n = 1..=n_max.
pub fn yield_curve<M: Likelihood>(
    design: &ExperimentDesign,
    m: &HypothesisMixture<M>,
    n_max: usize,
) -> Result<YieldCurve, PlannerError> {
    curve_by(design, n_max, disambiguation_value(m), |d| {
        expectation_ip(d, m)
    })
}

fn curve_by(
    design: &ExperimentDesign,
    n_max: usize,
    bound: f64,
    score: impl Fn(&ExperimentDesign) -> Result<f64, PlannerError>,
) -> Result<YieldCurve, PlannerError> {
    if n_max == 0 {
        return Err(PlannerError::ZeroReplicates);
    }
    let points = (1..=n_max)
        .map(|n| {
            let d = design.clone().with_replicates(n)?;
            Ok((n, score(&d)?))
        })
        .collect::<Result<Vec<_>, PlannerError>>()?;
    Ok(YieldCurve::from_points(points, bound))
}

fn dist(pairs: &[(&str, f64)]) -> Result<DiscreteDistribution, PlannerError> {
    Ok(DiscreteDistribution::from_pairs(pairs.iter().copied())?)
}

fn two_way_mixture(
    a: &str,
    b: &str,
    p_a: f64,
) -> Result<HypothesisMixture<DiscreteDistribution>, PlannerError> {
    let unit = DiscreteDistribution::from_pairs([("x", 1.0)])?;
    Ok(HypothesisMixture::with_prior(
        vec![(a.to_string(), unit.clone()), (b.to_string(), unit)],
        vec![p_a, 1.0 - p_a],
    )?)
}

/// Joint of hypothesis (present, absent) against the observable for a test that fails
/// with probability `f`. With a control, a failed replicate is recognisable.
pub fn technical_failure_joint(
    alpha: f64,
    f: f64,
    with_control: bool,
) -> Result<JointDistribution, PlannerError> {
    check_probability("alpha", alpha)?;
    check_probability("f", f)?;
    let rows = OutcomeSpace::new(["present", "absent"])?;
    if with_control {
        let cols = OutcomeSpace::new(["x+c+", "x-c-", "x-c+"])?;
        Ok(JointDistribution::new(
            rows,
            cols,
            vec![
                vec![alpha * (1.0 - f), alpha * f, 0.0],
                vec![0.0, (1.0 - alpha) * f, (1.0 - alpha) * (1.0 - f)],
            ],
        )?)
    } else {
        let cols = OutcomeSpace::new(["x+", "x-"])?;
        Ok(JointDistribution::new(
            rows,
            cols,
            vec![vec![alpha * (1.0 - f), alpha * f], vec![0.0, 1.0 - alpha]],
        )?)
    }
}

pub fn technical_failure_mi(alpha: f64, f: f64, with_control: bool) -> Result<f64, PlannerError> {
    Ok(infocore::mutual_information(&technical_failure_joint(
        alpha,
        f,
        with_control,
    )?))
}

pub fn control_information(alpha: f64, f: f64) -> Result<f64, PlannerError> {
    Ok(technical_failure_mi(alpha, f, true)? - technical_failure_mi(alpha, f, false)?)
}

pub const SAME_SPECIES: &str = "same-species";
pub const DIFFERENT_SPECIES: &str = "different-species";

/// A cross that yields progeny only between members of one species, failing
/// from bad weather with probability `p_bad`. The control adds a cross known
/// to be fertile, planted in the same plot.
pub fn bad_weather_design(
    p_bad: f64,
    with_control: bool,
    n: usize,
) -> Result<ExperimentDesign, PlannerError> {
    check_probability("p_bad", p_bad)?;
    let good = 1.0 - p_bad;
    let (same, diff) = if with_control {
        (
            dist(&[("x+c+", good), ("x-c-", p_bad), ("x-c+", 0.0)])?,
            dist(&[("x+c+", 0.0), ("x-c-", p_bad), ("x-c+", good)])?,
        )
    } else {
        (
            dist(&[("progeny", good), ("none", p_bad)])?,
            dist(&[("progeny", 0.0), ("none", 1.0)])?,
        )
    };
    let outcomes = BTreeMap::from([
        (SAME_SPECIES.to_string(), same),
        (DIFFERENT_SPECIES.to_string(), diff),
    ]);
    let mut design = ExperimentDesign::new("wh-x-pu", outcomes, n)?;
    if with_control {
        design = design.with_control("pu-x-pu").with_costs(0.0, 2.0)?;
    }
    Ok(design)
}

pub fn bad_weather_mixture(
    p_same: f64,
) -> Result<HypothesisMixture<DiscreteDistribution>, PlannerError> {
    check_probability("prior", p_same)?;
    two_way_mixture(SAME_SPECIES, DIFFERENT_SPECIES, p_same)
}

pub fn bad_weather_curve(
    p_bad: f64,
    p_same: f64,
    with_control: bool,
    n_max: usize,
) -> Result<YieldCurve, PlannerError> {
    let m = bad_weather_mixture(p_same)?;
    yield_curve(&bad_weather_design(p_bad, with_control, 1)?, &m, n_max)
}

pub const HERITABLE: &str = "heritable";
pub const ENVIRONMENTAL: &str = "environmental";

/// Wh×Wh replicates when white may instead be caused by an environmental
/// factor striking a plot with probability `p_env`. The control is a Pu×Pu
/// cross in the same plot.
pub fn env_factor_design(
    p_env: f64,
    with_control: bool,
    n: usize,
) -> Result<ExperimentDesign, PlannerError> {
    check_probability("p_env", p_env)?;
    let (heritable, env) = if with_control {
        (
            dist(&[("Wh/Pu", 1.0), ("Wh/Wh", 0.0), ("Pu/Pu", 0.0)])?,
            dist(&[("Wh/Pu", 0.0), ("Wh/Wh", p_env), ("Pu/Pu", 1.0 - p_env)])?,
        )
    } else {
        (
            dist(&[("Wh", 1.0), ("Pu", 0.0)])?,
            dist(&[("Wh", p_env), ("Pu", 1.0 - p_env)])?,
        )
    };
    let outcomes = BTreeMap::from([
        (HERITABLE.to_string(), heritable),
        (ENVIRONMENTAL.to_string(), env),
    ]);
    let mut design = ExperimentDesign::new("wh-x-wh", outcomes, n)?;
    if with_control {
        design = design.with_control("pu-x-pu").with_costs(0.0, 2.0)?;
    }
    Ok(design)
}

/// Heritable weight times the heritable model's divergence, for n = 1..=n_max.
pub fn env_factor_curve(
    p_env: f64,
    p_heritable: f64,
    with_control: bool,
    n_max: usize,
) -> Result<YieldCurve, PlannerError> {
    check_probability("p_heritable", p_heritable)?;
    let m = two_way_mixture(HERITABLE, ENVIRONMENTAL, p_heritable)?;
    let bound = -p_heritable * p_heritable.log2().min(0.0);
    let design = env_factor_design(p_env, with_control, 1)?;
    curve_by(
        &design,
        n_max,
        if bound.is_nan() { 0.0 } else { bound },
        |d| {
            if p_heritable == 0.0 {
                return Ok(0.0);
            }
            Ok(p_heritable * component_divergence(d, &m, HERITABLE)?)
        },
    )
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoredDesign {
    pub id: String,
    pub score: f64,
    pub cost: f64,
}

/// Score descending, then cost ascending, then id.
pub fn rank(scores: &mut [ScoredDesign]) {
    scores.sort_by(compare_scores);
}

pub fn compare_scores(a: &ScoredDesign, b: &ScoredDesign) -> Ordering {
    b.score
        .total_cmp(&a.score)
        .then(a.cost.total_cmp(&b.cost))
        .then_with(|| a.id.cmp(&b.id))
}
