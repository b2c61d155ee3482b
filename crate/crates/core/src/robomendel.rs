//! The planning loop: belief state, the standard experiment set, greedy
//! selection by targeted expected information, and result ingestion.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::genetics::{
    GeneticsError, World, WorldConfig, ANOMALOUS, HY_X_HY, HY_X_PU, HY_X_WH, MOUSE_X_LION, NONE,
    NORMAL, PROGENY, PU_X_PU_SELF, PU_X_PU_SWAP, WH_X_PU, WH_X_PU_SWAP, WH_X_WH,
};
use crate::infocore::{self, DiscreteDistribution, GaussianTraitModel, OutcomeSpace};
use crate::mixtures::HypothesisMixture;
use crate::planner::{self, ExperimentDesign, PlannerError, ScoredDesign};

pub const LFLS: &str = "lfls";
pub const WH_HERITABLE: &str = "wh-heritable";
pub const SAME_SPECIES: &str = "same-species";
pub const ONE_PARENT: &str = "one-parent";
pub const TRANSMISSION: &str = "transmission";
pub const MORE_TRAITS: &str = "more-traits";
pub const PU_UNDILUTABLE: &str = "pu-undilutable";
pub const SPECIES_HYBRID: &str = "species-hybrid";

pub const BASE_FACTORS: [&str; 3] = [LFLS, WH_HERITABLE, SAME_SPECIES];

pub const FLAG_HIDDEN_VARIABLE: &str = "hidden-variable-required";
pub const FLAG_NEW_TRAITS: &str = "new-traits-discovered";

/// Targeting key for the white-flower observable.
pub const TAU_WH: &str = "Wh";

#[derive(Debug, Error)]
pub enum RoboError {
    #[error("observed {counts} from `{design}` is impossible under every active model")]
    InconsistentResult { design: String, counts: String },
    #[error("no stopping point within {0} cycles")]
    MaxCyclesExceeded(usize),
    #[error("unknown design `{0}`")]
    UnknownDesign(String),
    #[error("invalid planner option: {0}")]
    InvalidOption(String),
    #[error(transparent)]
    Planner(#[from] PlannerError),
    #[error(transparent)]
    Genetics(#[from] GeneticsError),
}

/// Which model is proposed after an asymmetric Wh×Pu result.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Path {
    #[default]
    Canonical,
    PuUndilutable,
    SpeciesHybrid,
}

impl Path {
    fn proposal(self) -> &'static str {
        match self {
            Path::Canonical => ONE_PARENT,
            Path::PuUndilutable => PU_UNDILUTABLE,
            Path::SpeciesHybrid => SPECIES_HYBRID,
        }
    }
}

fn d_progeny() -> usize {
    20
}
fn d_true() -> bool {
    true
}
fn d_low() -> f64 {
    0.001
}
fn d_high() -> f64 {
    0.999
}
fn d_window() -> f64 {
    0.05
}
fn d_stop() -> f64 {
    0.05
}
fn d_cycles() -> usize {
    10
}
fn d_point3() -> f64 {
    0.3
}
fn d_width() -> f64 {
    20.0
}
fn d_sd() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlannerOptions {
    /// Replicates scored (and simulated) per design.
    #[serde(default = "d_progeny")]
    pub progeny_per_design: usize,
    #[serde(default = "d_true")]
    pub clamp: bool,
    #[serde(default = "d_low")]
    pub clamp_low: f64,
    #[serde(default = "d_high")]
    pub clamp_high: f64,
    /// Run the runner-up too when it scores within this many bits of the top.
    #[serde(default = "d_window")]
    pub joint_window: f64,
    #[serde(default = "d_stop")]
    pub stop_below: f64,
    #[serde(default = "d_cycles")]
    pub max_cycles: usize,
    /// Failure rate RoboMendel assumes for an outdoor cross.
    #[serde(default = "d_point3")]
    pub assumed_p_bad_weather: f64,
    /// Environmental whitening rate assumed by the non-heritable model.
    #[serde(default = "d_point3")]
    pub assumed_p_env_factor: f64,
    /// Range of the flat density used for an unseen trait.
    #[serde(default = "d_width")]
    pub novel_trait_width: f64,
    #[serde(default = "d_sd")]
    pub novel_trait_sd: f64,
}

impl Default for PlannerOptions {
    fn default() -> Self {
        Self {
            progeny_per_design: d_progeny(),
            clamp: true,
            clamp_low: d_low(),
            clamp_high: d_high(),
            joint_window: d_window(),
            stop_below: d_stop(),
            max_cycles: d_cycles(),
            assumed_p_bad_weather: d_point3(),
            assumed_p_env_factor: d_point3(),
            novel_trait_width: d_width(),
            novel_trait_sd: d_sd(),
        }
    }
}

impl PlannerOptions {
    pub fn validate(&self) -> Result<(), RoboError> {
        let bad = |m: &str| Err(RoboError::InvalidOption(m.to_string()));
        if self.progeny_per_design == 0 {
            return bad("progeny_per_design must be at least 1");
        }
        if !(0.0 <= self.clamp_low && self.clamp_low < self.clamp_high && self.clamp_high <= 1.0) {
            return bad("clamp bounds must satisfy 0 <= clamp_low < clamp_high <= 1");
        }
        for (name, p) in [
            ("assumed_p_bad_weather", self.assumed_p_bad_weather),
            ("assumed_p_env_factor", self.assumed_p_env_factor),
        ] {
            if !(0.0..=1.0).contains(&p) {
                return Err(RoboError::InvalidOption(format!(
                    "{name} must lie in [0, 1]"
                )));
            }
        }
        if !(self.joint_window >= 0.0 && self.stop_below >= 0.0) {
            return bad("joint_window and stop_below must be non-negative");
        }
        if self.max_cycles == 0 {
            return bad("max_cycles must be at least 1");
        }
        if !(self.novel_trait_width > 0.0 && self.novel_trait_sd > 0.0) {
            return bad("novel trait width and sd must be positive");
        }
        Ok(())
    }

    fn decisive(&self) -> (f64, f64) {
        if self.clamp {
            (self.clamp_low, self.clamp_high)
        } else {
            (d_low(), d_high())
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BeliefState {
    pub probabilities: BTreeMap<String, f64>,
    pub tau: BTreeMap<String, f64>,
    /// Proposed models currently in play, beyond the three base factors.
    pub proposed_models: BTreeSet<String>,
    #[serde(default)]
    pub hybrids_available: bool,
    /// Observed label counts per design, one entry per run.
    #[serde(default)]
    pub history: BTreeMap<String, Vec<BTreeMap<String, usize>>>,
    #[serde(default)]
    pub flags: BTreeSet<String>,
}

impl Default for BeliefState {
    fn default() -> Self {
        Self::initial()
    }
}

impl BeliefState {
    pub fn initial() -> Self {
        Self::with_priors(&BTreeMap::new())
    }

    /// Initial beliefs with overrides; a non-base name is also proposed.
    pub fn with_priors(priors: &BTreeMap<String, f64>) -> Self {
        let mut probabilities = BTreeMap::from([
            (LFLS.to_string(), 0.999),
            (WH_HERITABLE.to_string(), 0.5),
            (SAME_SPECIES.to_string(), 0.5),
        ]);
        let mut proposed_models = BTreeSet::new();
        for (k, v) in priors {
            probabilities.insert(k.clone(), *v);
            if !BASE_FACTORS.contains(&k.as_str()) {
                proposed_models.insert(k.clone());
            }
        }
        let mut b = Self {
            probabilities,
            tau: BTreeMap::new(),
            proposed_models,
            hybrids_available: false,
            history: BTreeMap::new(),
            flags: BTreeSet::new(),
        };
        b.sync_tau();
        b
    }

    /// Weight of a factor being true; unproposed models are held false.
    pub fn p(&self, factor: &str) -> f64 {
        if BASE_FACTORS.contains(&factor) || self.proposed_models.contains(factor) {
            self.probabilities.get(factor).copied().unwrap_or(0.0)
        } else {
            0.0
        }
    }

    pub fn is_proposed(&self, model: &str) -> bool {
        self.proposed_models.contains(model)
    }

    pub fn propose(&mut self, model: &str, prior: f64) {
        if self.proposed_models.insert(model.to_string()) {
            self.probabilities.insert(model.to_string(), prior);
        }
    }

    fn sync_tau(&mut self) {
        let p = self.probabilities.get(WH_HERITABLE).copied().unwrap_or(0.5);
        self.tau.insert(TAU_WH.to_string(), p);
    }

    pub fn validate(&self) -> Result<(), RoboError> {
        for (k, v) in self.probabilities.iter().chain(&self.tau) {
            if !(0.0..=1.0).contains(v) {
                return Err(RoboError::InvalidOption(format!(
                    "belief `{k}` = {v} is not a probability"
                )));
            }
        }
        Ok(())
    }
}

/// One competing prediction: a truth assignment to some factors and the
/// per-replicate outcome distribution it implies.
#[derive(Debug, Clone)]
struct Component {
    factors: Vec<(&'static str, bool)>,
    probs: Vec<f64>,
}

impl Component {
    fn id(&self) -> String {
        if self.factors.is_empty() {
            return "baseline".into();
        }
        self.factors
            .iter()
            .map(|(f, v)| format!("{}{f}", if *v { "" } else { "not-" }))
            .collect::<Vec<_>>()
            .join("+")
    }

    fn weight(&self, b: &BeliefState) -> f64 {
        self.factors
            .iter()
            .map(|(f, v)| if *v { b.p(f) } else { 1.0 - b.p(f) })
            .product()
    }

    fn log_likelihood(&self, labels: &[&str], counts: &BTreeMap<String, usize>) -> f64 {
        let mut ll = 0.0;
        for (label, &c) in counts {
            if c == 0 {
                continue;
            }
            let p = labels
                .iter()
                .position(|l| l == label)
                .map_or(0.0, |i| self.probs[i]);
            if p <= 0.0 {
                return f64::NEG_INFINITY;
            }
            ll += c as f64 * p.ln();
        }
        ll
    }
}

/// A standard design with the components RoboMendel currently entertains.
#[derive(Debug, Clone)]
struct Plan {
    id: &'static str,
    labels: Vec<&'static str>,
    replicates: usize,
    components: Vec<Component>,
    /// Beliefs revised by this design's results.
    updates: Vec<&'static str>,
    targeted: bool,
}

fn c(factors: &[(&'static str, bool)], probs: &[f64]) -> Component {
    Component {
        factors: factors.to_vec(),
        probs: probs.to_vec(),
    }
}

fn plans(b: &BeliefState, o: &PlannerOptions) -> Vec<Plan> {
    let n = o.progeny_per_design;
    let good = 1.0 - o.assumed_p_bad_weather;
    let bad = o.assumed_p_bad_weather;
    let env = o.assumed_p_env_factor;
    let mut out = vec![
        Plan {
            id: MOUSE_X_LION,
            labels: vec![NONE, PROGENY],
            replicates: 1,
            components: vec![
                c(&[(LFLS, true)], &[1.0, 0.0]),
                c(&[(LFLS, false)], &[0.0, 1.0]),
            ],
            updates: vec![LFLS],
            targeted: false,
        },
        Plan {
            id: WH_X_WH,
            labels: vec!["Wh/Pu", "Wh/Wh", "Pu/Pu"],
            replicates: n,
            components: vec![
                c(&[(WH_HERITABLE, true)], &[1.0, 0.0, 0.0]),
                c(&[(WH_HERITABLE, false)], &[0.0, env, 1.0 - env]),
            ],
            updates: vec![WH_HERITABLE],
            targeted: true,
        },
        Plan {
            id: WH_X_PU,
            labels: vec![PROGENY, NONE],
            replicates: 1,
            components: vec![
                c(&[(SAME_SPECIES, true)], &[good, bad]),
                c(&[(SAME_SPECIES, false), (LFLS, true)], &[0.0, 1.0]),
                c(&[(SAME_SPECIES, false), (LFLS, false)], &[good, bad]),
            ],
            updates: vec![SAME_SPECIES],
            targeted: true,
        },
        Plan {
            id: WH_X_PU_SWAP,
            labels: vec!["Pu/Pu", "Wh/Pu"],
            replicates: n,
            components: vec![
                c(&[(ONE_PARENT, true)], &[0.0, 1.0]),
                c(&[(ONE_PARENT, false)], &[1.0, 0.0]),
            ],
            updates: vec![ONE_PARENT],
            targeted: false,
        },
        Plan {
            id: PU_X_PU_SWAP,
            labels: vec!["Pu/Pu"],
            replicates: n,
            components: vec![c(&[], &[1.0])],
            updates: vec![],
            targeted: false,
        },
        Plan {
            id: PU_X_PU_SELF,
            labels: vec![NORMAL, ANOMALOUS],
            replicates: n,
            components: vec![
                c(&[(MORE_TRAITS, true)], &[0.75, 0.25]),
                c(&[(MORE_TRAITS, false)], &[1.0, 0.0]),
            ],
            updates: vec![MORE_TRAITS],
            targeted: false,
        },
    ];
    if b.hybrids_available {
        let hy_labels = vec!["Pu", "Wh", NONE];
        // Counter-model of an alternative proposal: fertile, colors unconstrained.
        let noncommittal = [0.5, 0.5, 0.0];
        let purple = [1.0, 0.0, 0.0];
        let hy_hy_rest = if b.is_proposed(SPECIES_HYBRID) {
            noncommittal
        } else {
            purple
        };
        let hy_wh_rest = if b.is_proposed(PU_UNDILUTABLE) {
            noncommittal
        } else {
            purple
        };
        out.extend([
            Plan {
                id: HY_X_HY,
                labels: hy_labels.clone(),
                replicates: n,
                components: vec![
                    c(&[(SPECIES_HYBRID, true)], &[0.0, 0.0, 1.0]),
                    c(
                        &[(SPECIES_HYBRID, false), (TRANSMISSION, true)],
                        &[0.75, 0.25, 0.0],
                    ),
                    c(
                        &[(SPECIES_HYBRID, false), (TRANSMISSION, false)],
                        &hy_hy_rest,
                    ),
                ],
                updates: vec![TRANSMISSION, SPECIES_HYBRID],
                targeted: false,
            },
            Plan {
                id: HY_X_WH,
                labels: hy_labels.clone(),
                replicates: n,
                components: vec![
                    c(&[(TRANSMISSION, true)], &[0.5, 0.5, 0.0]),
                    c(&[(TRANSMISSION, false), (PU_UNDILUTABLE, true)], &purple),
                    c(
                        &[(TRANSMISSION, false), (PU_UNDILUTABLE, false)],
                        &hy_wh_rest,
                    ),
                ],
                updates: vec![TRANSMISSION, PU_UNDILUTABLE],
                targeted: false,
            },
            Plan {
                id: HY_X_PU,
                labels: hy_labels,
                replicates: n,
                components: vec![c(&[], &purple)],
                updates: vec![],
                targeted: false,
            },
        ]);
    }
    out
}

/// Components with positive weight that explain every past run of the plan,
/// with renormalized weights.
fn live_components(plan: &Plan, b: &BeliefState) -> Vec<(Component, f64)> {
    let past = b.history.get(plan.id).map(Vec::as_slice).unwrap_or(&[]);
    let live: Vec<(Component, f64)> = plan
        .components
        .iter()
        .map(|comp| (comp.clone(), comp.weight(b)))
        .filter(|(comp, w)| {
            *w > 0.0
                && past
                    .iter()
                    .all(|counts| comp.log_likelihood(&plan.labels, counts) > f64::NEG_INFINITY)
        })
        .collect();
    let total: f64 = live.iter().map(|(_, w)| w).sum();
    live.into_iter()
        .map(|(comp, w)| (comp, w / total))
        .collect()
}

fn design_of(
    plan: &Plan,
    comps: &[(Component, f64)],
) -> Result<(ExperimentDesign, HypothesisMixture<DiscreteDistribution>), RoboError> {
    let space = OutcomeSpace::new(plan.labels.iter().copied()).map_err(PlannerError::from)?;
    let mut outcomes = BTreeMap::new();
    let mut mix = Vec::new();
    for (comp, w) in comps {
        let d = DiscreteDistribution::new(space.clone(), comp.probs.clone())
            .map_err(PlannerError::from)?;
        outcomes.insert(comp.id(), d.clone());
        mix.push(((comp.id(), d), *w));
    }
    if outcomes.is_empty() {
        let d = DiscreteDistribution::uniform(&space);
        outcomes.insert("baseline".into(), d.clone());
        mix.push((("baseline".into(), d), 1.0));
    }
    let design = ExperimentDesign::new(plan.id, outcomes, plan.replicates)?;
    let (components, mut weights): (Vec<_>, Vec<f64>) = mix.into_iter().unzip();
    let total: f64 = weights.iter().sum();
    weights.iter_mut().for_each(|w| *w /= total);
    let drift = 1.0 - weights.iter().sum::<f64>();
    weights[0] += drift;
    let mixture = HypothesisMixture::with_prior(components, weights).map_err(PlannerError::from)?;
    Ok((design, mixture))
}

/// The standard experiment set for the current beliefs.
pub fn standard_set(
    b: &BeliefState,
    o: &PlannerOptions,
) -> Result<Vec<ExperimentDesign>, RoboError> {
    plans(b, o)
        .iter()
        .map(|p| Ok(design_of(p, &live_components(p, b))?.0))
        .collect()
}

/// Expected yield of a self-cross that may reveal a new trait: the novel
/// trait is given a flat density of `width` against the current model.
pub fn novel_trait_divergence(p_more: f64, width: f64, sd: f64) -> f64 {
    let h = infocore::gaussian_entropy(&GaussianTraitModel::new(0.0, sd).expect("positive sd"));
    (width / p_more).log2() - h
}

fn score_plan(plan: &Plan, b: &BeliefState, o: &PlannerOptions) -> Result<f64, RoboError> {
    let comps = live_components(plan, b);
    if plan.id == PU_X_PU_SELF {
        let p = b.p(MORE_TRAITS);
        if comps.len() < 2 || p <= 0.0 {
            return Ok(0.0);
        }
        return Ok(p * novel_trait_divergence(p, o.novel_trait_width, o.novel_trait_sd));
    }
    let (design, mixture) = design_of(plan, &comps)?;
    let e = planner::expectation_ip(&design, &mixture)?;
    let tau = if plan.targeted {
        b.tau.get(TAU_WH).copied().unwrap_or(1.0)
    } else {
        1.0
    };
    Ok(planner::targeted_ip(e, tau)?)
}

/// Replicates a standard design is scored and run with.
pub fn replicates_of(b: &BeliefState, o: &PlannerOptions, id: &str) -> Result<usize, RoboError> {
    plans(b, o)
        .iter()
        .find(|p| p.id == id)
        .map(|p| p.replicates)
        .ok_or_else(|| RoboError::UnknownDesign(id.to_string()))
}

/// Targeted scores of every standard design, best first.
pub fn evaluate_cycle(b: &BeliefState, o: &PlannerOptions) -> Result<Vec<ScoredDesign>, RoboError> {
    let mut scores = plans(b, o)
        .iter()
        .map(|p| {
            Ok(ScoredDesign {
                id: p.id.to_string(),
                score: score_plan(p, b, o)?,
                cost: p.replicates as f64,
            })
        })
        .collect::<Result<Vec<_>, RoboError>>()?;
    planner::rank(&mut scores);
    Ok(scores)
}

/// Result of one design run, as seen by the planner.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Observed {
    pub design: String,
    pub counts: BTreeMap<String, usize>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub progeny: BTreeMap<String, usize>,
}

fn format_counts(counts: &BTreeMap<String, usize>) -> String {
    counts
        .iter()
        .map(|(k, v)| format!("{k}:{v}"))
        .collect::<Vec<_>>()
        .join(",")
}

/// Bayes-updates the beliefs a design bears on, clamps decisive posteriors
/// and applies the model-proposal triggers.
pub fn ingest(
    b: &BeliefState,
    obs: &Observed,
    o: &PlannerOptions,
    path: Path,
) -> Result<BeliefState, RoboError> {
    let all = plans(b, o);
    let plan = all
        .iter()
        .find(|p| p.id == obs.design)
        .ok_or_else(|| RoboError::UnknownDesign(obs.design.clone()))?;
    let inconsistent = || RoboError::InconsistentResult {
        design: obs.design.clone(),
        counts: format_counts(&obs.counts),
    };
    let live = live_components(plan, b);
    let logs: Vec<f64> = live
        .iter()
        .map(|(comp, w)| w.ln() + comp.log_likelihood(&plan.labels, &obs.counts))
        .collect();
    let max = logs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return Err(inconsistent());
    }
    let post: Vec<f64> = logs.iter().map(|l| (l - max).exp()).collect();
    let z: f64 = post.iter().sum();

    let mut next = b.clone();
    let (lo, hi) = o.decisive();
    let mut refuted = Vec::new();
    let mut confirmed = Vec::new();
    for factor in &plan.updates {
        if !(BASE_FACTORS.contains(factor) || b.is_proposed(factor)) {
            continue;
        }
        let mut p: f64 = live
            .iter()
            .zip(&post)
            .filter(|((comp, _), _)| comp.factors.contains(&(*factor, true)))
            .map(|(_, q)| q / z)
            .sum();
        if o.clamp {
            p = p.clamp(o.clamp_low, o.clamp_high);
        }
        if p <= lo + 1e-12 {
            refuted.push(*factor);
        } else if p >= hi - 1e-12 {
            confirmed.push(*factor);
        }
        next.probabilities.insert(factor.to_string(), p);
    }
    next.history
        .entry(obs.design.clone())
        .or_default()
        .push(obs.counts.clone());

    for model in &refuted {
        next.proposed_models.remove(*model);
    }
    if obs.design == WH_X_PU && confirmed.contains(&SAME_SPECIES) && obs.progeny.len() == 1 {
        next.hybrids_available = true;
        next.propose(path.proposal(), 0.5);
    }
    if refuted.contains(&ONE_PARENT) {
        next.propose(TRANSMISSION, 0.5);
    }
    if refuted.contains(&PU_UNDILUTABLE) || refuted.contains(&SPECIES_HYBRID) {
        next.flags.insert(FLAG_HIDDEN_VARIABLE.into());
        next.propose(TRANSMISSION, 0.5);
    }
    if confirmed.contains(&TRANSMISSION) {
        next.propose(MORE_TRAITS, 0.5);
    }
    if confirmed.contains(&MORE_TRAITS) {
        next.flags.insert(FLAG_NEW_TRAITS.into());
    }
    next.sync_tau();
    Ok(next)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlanningCycle {
    pub cycle: usize,
    pub scores: Vec<ScoredDesign>,
    pub chosen: Vec<String>,
    pub observed: Vec<Observed>,
    pub belief_before: BeliefState,
    pub belief_after: BeliefState,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StopReason {
    /// The best remaining design scored at or below the stop threshold.
    Exhausted,
    /// An alternative proposal was rejected and transmission proposed.
    AlternativeRejected,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Transcript {
    pub path: Path,
    pub seed: u64,
    pub cycles: Vec<PlanningCycle>,
    pub final_scores: Vec<ScoredDesign>,
    pub final_belief: BeliefState,
    pub stop_reason: StopReason,
}

impl Transcript {
    pub fn chosen(&self) -> Vec<Vec<String>> {
        self.cycles.iter().map(|c| c.chosen.clone()).collect()
    }
}

/// Top design, plus the runner-up when it is within the joint window.
pub fn choose(scores: &[ScoredDesign], o: &PlannerOptions) -> Vec<String> {
    let mut chosen = Vec::new();
    if let Some(top) = scores.first() {
        chosen.push(top.id.clone());
        if let Some(second) = scores.get(1) {
            if second.score > o.stop_below && top.score - second.score <= o.joint_window {
                chosen.push(second.id.clone());
            }
        }
    }
    chosen
}

/// Plans, runs and ingests experiments until nothing worthwhile remains.
pub fn run_sequence(
    world: WorldConfig,
    initial: BeliefState,
    o: &PlannerOptions,
    path: Path,
) -> Result<Transcript, RoboError> {
    o.validate()?;
    initial.validate()?;
    let seed = world.rng_seed;
    let mut world = World::new(world)?;
    let mut belief = initial;
    let mut cycles = Vec::new();
    for cycle in 1..=o.max_cycles + 1 {
        let scores = evaluate_cycle(&belief, o)?;
        let finished = |reason| Transcript {
            path,
            seed,
            cycles: Vec::new(),
            final_scores: scores.clone(),
            final_belief: belief.clone(),
            stop_reason: reason,
        };
        if belief.flags.contains(FLAG_HIDDEN_VARIABLE) {
            return Ok(Transcript {
                cycles,
                ..finished(StopReason::AlternativeRejected)
            });
        }
        if scores.first().is_none_or(|s| s.score <= o.stop_below) {
            return Ok(Transcript {
                cycles,
                ..finished(StopReason::Exhausted)
            });
        }
        if cycle > o.max_cycles {
            break;
        }
        let chosen = choose(&scores, o);
        let mut after = belief.clone();
        let mut observed = Vec::new();
        for id in &chosen {
            let run = world.run_design(id, replicates_of(&belief, o, id)?)?;
            let obs = Observed {
                design: id.clone(),
                counts: run.counts(),
                progeny: run.progeny,
            };
            after = ingest(&after, &obs, o, path)?;
            observed.push(obs);
        }
        cycles.push(PlanningCycle {
            cycle,
            scores,
            chosen,
            observed,
            belief_before: belief,
            belief_after: after.clone(),
        });
        belief = after;
    }
    Err(RoboError::MaxCyclesExceeded(o.max_cycles))
}
