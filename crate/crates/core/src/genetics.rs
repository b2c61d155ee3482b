//! Pea-world simulator: loci with dominance, organisms, crosses under the
//! competing inheritance models, weather and environmental confounds.

use std::collections::BTreeMap;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::estimators::{EstimatorError, ObservationSample};
use crate::infocore::GaussianTraitModel;

pub const FLOWER_LOCUS: &str = "flower-color";

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeneticsError {
    #[error("no trait model for phenotype `{0}`")]
    UnknownPhenotype(String),
    #[error("unknown design `{0}`")]
    UnknownDesign(String),
    #[error("locus `{locus}` has no phenotype for alleles {a}/{b}")]
    IncompleteDominance { locus: String, a: String, b: String },
    #[error("invalid world configuration: {0}")]
    InvalidConfig(String),
    #[error("could not obtain a hybrid after {0} attempts")]
    NoHybrid(usize),
    #[error(transparent)]
    Sample(#[from] EstimatorError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum InheritanceModel {
    Lfls,
    OneParent,
    #[default]
    Transmission,
}

/// A locus with two alleles and a phenotype for every unordered allele pair.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Locus {
    pub id: String,
    pub alleles: [String; 2],
    dominance: BTreeMap<String, String>,
    /// Trait-vector axis this locus expresses on.
    pub axis: usize,
}

fn pair_key(a: &str, b: &str) -> String {
    if a <= b {
        format!("{a}/{b}")
    } else {
        format!("{b}/{a}")
    }
}

impl Locus {
    pub fn new(
        id: impl Into<String>,
        alleles: [&str; 2],
        dominance: impl IntoIterator<Item = ((String, String), String)>,
        axis: usize,
    ) -> Result<Self, GeneticsError> {
        let id = id.into();
        let dominance: BTreeMap<String, String> = dominance
            .into_iter()
            .map(|((a, b), p)| (pair_key(&a, &b), p))
            .collect();
        let [x, y] = alleles;
        for (a, b) in [(x, x), (x, y), (y, y)] {
            if !dominance.contains_key(&pair_key(a, b)) {
                return Err(GeneticsError::IncompleteDominance {
                    locus: id,
                    a: a.into(),
                    b: b.into(),
                });
            }
        }
        Ok(Self {
            id,
            alleles: [x.to_string(), y.to_string()],
            dominance,
            axis,
        })
    }

    /// Two alleles where `dominant` masks `recessive` in heterozygotes.
    pub fn simple(
        id: &str,
        dominant: &str,
        recessive: &str,
        dominant_phenotype: &str,
        recessive_phenotype: &str,
        axis: usize,
    ) -> Self {
        let d = |a: &str, b: &str, p: &str| ((a.to_string(), b.to_string()), p.to_string());
        Self::new(
            id,
            [dominant, recessive],
            [
                d(dominant, dominant, dominant_phenotype),
                d(dominant, recessive, dominant_phenotype),
                d(recessive, recessive, recessive_phenotype),
            ],
            axis,
        )
        .expect("complete by construction")
    }

    pub fn phenotype(&self, a: &str, b: &str) -> Option<&str> {
        self.dominance.get(&pair_key(a, b)).map(String::as_str)
    }

    pub fn phenotypes(&self) -> impl Iterator<Item = &str> {
        self.dominance.values().map(String::as_str)
    }
}

/// Flower color plus Mendel's other recessive traits, in the order hidden
/// loci are added.
pub fn standard_loci(hidden: usize) -> Vec<Locus> {
    const HIDDEN: [(&str, &str, &str, &str, &str); 5] = [
        ("seed-shape", "R", "r", "Round", "Wrinkled"),
        ("pod-color", "G", "g", "Green-pod", "Yellow-pod"),
        ("pod-shape", "I", "i", "Inflated", "Constricted"),
        ("flower-position", "A", "a", "Axial", "Terminal"),
        ("stem-length", "T", "t", "Tall", "Short"),
    ];
    let mut loci = vec![Locus::simple(FLOWER_LOCUS, "pu", "wh", "Pu", "Wh", 0)];
    for (k, (id, d, r, dp, rp)) in HIDDEN.iter().take(hidden).enumerate() {
        loci.push(Locus::simple(id, d, r, dp, rp, k + 1));
    }
    loci
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Organism {
    pub species_id: String,
    pub genotype: BTreeMap<String, (String, String)>,
    pub phenotypes: BTreeMap<String, String>,
    pub traits: Vec<f64>,
}

impl Organism {
    pub fn flower(&self) -> Option<&str> {
        self.phenotypes.get(FLOWER_LOCUS).map(String::as_str)
    }
}

fn default_seeds() -> usize {
    30
}

fn default_dims() -> usize {
    4
}

fn default_hidden() -> usize {
    1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WorldConfig {
    #[serde(default)]
    pub inheritance_model: InheritanceModel,
    #[serde(default)]
    pub p_bad_weather: f64,
    #[serde(default)]
    pub p_env_factor: f64,
    #[serde(default = "default_seeds")]
    pub seeds_per_cross: usize,
    #[serde(default = "default_dims")]
    pub trait_dims: usize,
    /// Recessive traits carried heterozygously by the Pu stock (at most 5).
    #[serde(default = "default_hidden")]
    pub hidden_recessive_loci: usize,
    #[serde(default)]
    pub trait_models: BTreeMap<String, GaussianTraitModel>,
    #[serde(default)]
    pub rng_seed: u64,
}

impl Default for WorldConfig {
    fn default() -> Self {
        Self {
            inheritance_model: InheritanceModel::default(),
            p_bad_weather: 0.0,
            p_env_factor: 0.0,
            seeds_per_cross: default_seeds(),
            trait_dims: default_dims(),
            hidden_recessive_loci: default_hidden(),
            trait_models: BTreeMap::new(),
            rng_seed: 0,
        }
    }
}

impl WorldConfig {
    pub fn validate(&self) -> Result<(), GeneticsError> {
        let bad = |m: String| Err(GeneticsError::InvalidConfig(m));
        for (name, p) in [
            ("p_bad_weather", self.p_bad_weather),
            ("p_env_factor", self.p_env_factor),
        ] {
            if !(0.0..=1.0).contains(&p) {
                return bad(format!("{name} = {p} is not a probability"));
            }
        }
        if self.seeds_per_cross == 0 {
            return bad("seeds_per_cross must be at least 1".into());
        }
        if self.trait_dims == 0 {
            return bad("trait_dims must be at least 1".into());
        }
        if self.hidden_recessive_loci > 5 {
            return bad("at most 5 hidden recessive loci are available".into());
        }
        for (label, m) in &self.trait_models {
            if !(m.sd() > 0.0 && m.sd().is_finite() && m.mean().is_finite()) {
                return bad(format!(
                    "trait model for `{label}` needs a finite mean and sd > 0"
                ));
            }
        }
        Ok(())
    }

    /// Configured trait models over the defaults: dominant phenotypes at
    /// N(0, 1) and recessive ones 10 sd away.
    pub fn effective_trait_models(&self) -> BTreeMap<String, GaussianTraitModel> {
        let mut models = BTreeMap::new();
        for locus in standard_loci(self.hidden_recessive_loci) {
            let dom = locus
                .phenotype(&locus.alleles[0], &locus.alleles[0])
                .unwrap()
                .to_string();
            let rec = locus
                .phenotype(&locus.alleles[1], &locus.alleles[1])
                .unwrap()
                .to_string();
            models.insert(dom, GaussianTraitModel::unit(0.0));
            models.insert(rec, GaussianTraitModel::unit(10.0));
        }
        models.extend(self.trait_models.clone());
        models
    }
}

/// One Gaussian draw per trait axis; each locus draws its axis from the model
/// of its phenotype, other axes from N(0, 1).
pub fn sample_traits<R: Rng + ?Sized>(
    phenotypes: &BTreeMap<String, String>,
    loci: &[Locus],
    models: &BTreeMap<String, GaussianTraitModel>,
    dims: usize,
    rng: &mut R,
) -> Result<Vec<f64>, GeneticsError> {
    let mut axis_model = vec![GaussianTraitModel::unit(0.0); dims];
    for locus in loci {
        if let Some(label) = phenotypes.get(&locus.id) {
            let m = models
                .get(label)
                .ok_or_else(|| GeneticsError::UnknownPhenotype(label.clone()))?;
            if locus.axis < dims {
                axis_model[locus.axis] = *m;
            }
        }
    }
    Ok(axis_model
        .iter()
        .map(|m| {
            Normal::new(m.mean(), m.sd())
                .expect("validated sd")
                .sample(rng)
        })
        .collect())
}

/// Environmental conditions shared by every cross planted in one plot.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Plot {
    pub bad_weather: bool,
    pub env_factor: bool,
}

impl Plot {
    pub fn draw<R: Rng + ?Sized>(w: &WorldConfig, rng: &mut R) -> Self {
        Self {
            bad_weather: rng.random::<f64>() < w.p_bad_weather,
            env_factor: rng.random::<f64>() < w.p_env_factor,
        }
    }
}

/// Simulator state: loci, configuration and trait models.
#[derive(Debug, Clone)]
pub struct Genome {
    pub loci: Vec<Locus>,
    pub config: WorldConfig,
    models: BTreeMap<String, GaussianTraitModel>,
}

impl Genome {
    pub fn new(config: WorldConfig) -> Result<Self, GeneticsError> {
        config.validate()?;
        let loci = standard_loci(config.hidden_recessive_loci);
        let models = config.effective_trait_models();
        Ok(Self {
            loci,
            config,
            models,
        })
    }

    fn phenotypes(
        &self,
        genotype: &BTreeMap<String, (String, String)>,
    ) -> BTreeMap<String, String> {
        self.loci
            .iter()
            .filter_map(|l| {
                let (a, b) = genotype.get(&l.id)?;
                Some((l.id.clone(), l.phenotype(a, b)?.to_string()))
            })
            .collect()
    }

    /// Builds an organism with phenotypes and sampled traits.
    pub fn organism<R: Rng + ?Sized>(
        &self,
        species: &str,
        genotype: BTreeMap<String, (String, String)>,
        env_factor: bool,
        rng: &mut R,
    ) -> Result<Organism, GeneticsError> {
        let mut phenotypes = self.phenotypes(&genotype);
        if env_factor {
            if let Some(p) = phenotypes.get_mut(FLOWER_LOCUS) {
                *p = "Wh".into();
            }
        }
        let traits = sample_traits(
            &phenotypes,
            &self.loci,
            &self.models,
            self.config.trait_dims,
            rng,
        )?;
        Ok(Organism {
            species_id: species.to_string(),
            genotype,
            phenotypes,
            traits,
        })
    }

    /// Offspring of one cross in its own plot.
    pub fn cross<R: Rng + ?Sized>(
        &self,
        mother: &Organism,
        father: &Organism,
        rng: &mut R,
    ) -> Result<Vec<Organism>, GeneticsError> {
        let plot = Plot::draw(&self.config, rng);
        self.cross_in_plot(mother, father, plot, rng)
    }

    pub fn self_cross<R: Rng + ?Sized>(
        &self,
        parent: &Organism,
        rng: &mut R,
    ) -> Result<Vec<Organism>, GeneticsError> {
        self.cross(parent, parent, rng)
    }

    pub fn cross_in_plot<R: Rng + ?Sized>(
        &self,
        mother: &Organism,
        father: &Organism,
        plot: Plot,
        rng: &mut R,
    ) -> Result<Vec<Organism>, GeneticsError> {
        if mother.species_id != father.species_id || plot.bad_weather {
            return Ok(Vec::new());
        }
        (0..self.config.seeds_per_cross)
            .map(|_| {
                let genotype = match self.config.inheritance_model {
                    InheritanceModel::Lfls => {
                        if rng.random::<bool>() {
                            mother.genotype.clone()
                        } else {
                            father.genotype.clone()
                        }
                    }
                    InheritanceModel::OneParent => father.genotype.clone(),
                    InheritanceModel::Transmission => mother
                        .genotype
                        .iter()
                        .filter_map(|(locus, (m1, m2))| {
                            let (f1, f2) = father.genotype.get(locus)?;
                            let from_m = if rng.random::<bool>() { m1 } else { m2 };
                            let from_f = if rng.random::<bool>() { f1 } else { f2 };
                            Some((locus.clone(), (from_m.clone(), from_f.clone())))
                        })
                        .collect(),
                };
                self.organism(&mother.species_id, genotype, plot.env_factor, rng)
            })
            .collect()
    }
}

pub const MOUSE_X_LION: &str = "mouse-x-lion";
pub const WH_X_WH: &str = "wh-x-wh";
pub const WH_X_PU: &str = "wh-x-pu";
pub const WH_X_PU_SWAP: &str = "wh-x-pu-swap";
pub const PU_X_PU_SWAP: &str = "pu-x-pu-swap";
pub const PU_X_PU_SELF: &str = "pu-x-pu-self";
pub const HY_X_HY: &str = "hy-x-hy";
pub const HY_X_WH: &str = "hy-x-wh";
pub const HY_X_PU: &str = "hy-x-pu";

pub const DESIGN_IDS: [&str; 9] = [
    MOUSE_X_LION,
    WH_X_WH,
    WH_X_PU,
    WH_X_PU_SWAP,
    PU_X_PU_SWAP,
    PU_X_PU_SELF,
    HY_X_HY,
    HY_X_WH,
    HY_X_PU,
];

pub const NONE: &str = "none";
pub const PROGENY: &str = "progeny";
pub const NORMAL: &str = "normal";
pub const ANOMALOUS: &str = "anomalous";

/// Labelled outcome of running a design: one label per replicate, tagged
/// with the plot it came from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DesignRun {
    pub design: String,
    pub labels: Vec<String>,
    pub tags: Vec<String>,
    /// Trait vectors of every organism observed, in label order.
    pub traits: Vec<Vec<f64>>,
    /// Flower colors of progeny from crosses scored only as progeny/none.
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub progeny: BTreeMap<String, usize>,
}

impl DesignRun {
    pub fn counts(&self) -> BTreeMap<String, usize> {
        let mut c = BTreeMap::new();
        for l in &self.labels {
            *c.entry(l.clone()).or_insert(0) += 1;
        }
        c
    }

    pub fn sample(&self) -> Result<ObservationSample, GeneticsError> {
        Ok(ObservationSample::with_tags(
            self.labels.iter().map(|l| l.as_str().into()).collect(),
            self.tags.iter().cloned().map(Some).collect(),
        )?)
    }
}

/// Stocks of the pea world and a seeded generator.
#[derive(Debug, Clone)]
pub struct World {
    pub genome: Genome,
    stocks: BTreeMap<String, Organism>,
    rng: ChaCha8Rng,
    plots: usize,
}

impl World {
    pub fn new(config: WorldConfig) -> Result<Self, GeneticsError> {
        let mut rng = ChaCha8Rng::seed_from_u64(config.rng_seed);
        let genome = Genome::new(config)?;
        let geno = |flower: (&str, &str), hidden_het: bool| {
            let mut g = BTreeMap::new();
            for l in &genome.loci {
                let [d, r] = &l.alleles;
                let pair = if l.id == FLOWER_LOCUS {
                    (flower.0.to_string(), flower.1.to_string())
                } else if hidden_het {
                    (d.clone(), r.clone())
                } else {
                    (d.clone(), d.clone())
                };
                g.insert(l.id.clone(), pair);
            }
            g
        };
        let mut stocks = BTreeMap::new();
        stocks.insert(
            "Pu".into(),
            genome.organism("pea", geno(("pu", "pu"), true), false, &mut rng)?,
        );
        stocks.insert(
            "Wh".into(),
            genome.organism("pea", geno(("wh", "wh"), false), false, &mut rng)?,
        );
        stocks.insert(
            "Mouse".into(),
            genome.organism("mouse", BTreeMap::new(), false, &mut rng)?,
        );
        stocks.insert(
            "Lion".into(),
            genome.organism("lion", BTreeMap::new(), false, &mut rng)?,
        );
        Ok(Self {
            genome,
            stocks,
            rng,
            plots: 0,
        })
    }

    pub fn stock(&self, name: &str) -> Option<&Organism> {
        self.stocks.get(name)
    }

    pub fn has_hybrid(&self) -> bool {
        self.stocks.contains_key("Hy")
    }

    pub fn rng(&mut self) -> &mut ChaCha8Rng {
        &mut self.rng
    }

    fn next_plot(&mut self) -> (Plot, String) {
        self.plots += 1;
        (
            Plot::draw(&self.genome.config, &mut self.rng),
            format!("plot-{}", self.plots),
        )
    }

    fn cross_stocks(
        &mut self,
        mother: &str,
        father: &str,
        plot: Plot,
    ) -> Result<Vec<Organism>, GeneticsError> {
        let m = self.stocks[mother].clone();
        let f = self.stocks[father].clone();
        self.genome.cross_in_plot(&m, &f, plot, &mut self.rng)
    }

    /// The purple child of a Wh (mother) × Pu (father) cross, created on
    /// first use.
    pub fn hybrid(&mut self) -> Result<Organism, GeneticsError> {
        const ATTEMPTS: usize = 1000;
        if let Some(h) = self.stocks.get("Hy") {
            return Ok(h.clone());
        }
        for _ in 0..ATTEMPTS {
            let (plot, _) = self.next_plot();
            let kids = self.cross_stocks("Wh", "Pu", plot)?;
            if let Some(h) = kids.into_iter().find(|k| k.flower() == Some("Pu")) {
                self.stocks.insert("Hy".into(), h.clone());
                return Ok(h);
            }
        }
        Err(GeneticsError::NoHybrid(ATTEMPTS))
    }

    /// Runs `replicates` replicates of a standard design.
    pub fn run_design(&mut self, id: &str, replicates: usize) -> Result<DesignRun, GeneticsError> {
        let mut run = DesignRun {
            design: id.to_string(),
            labels: Vec::new(),
            tags: Vec::new(),
            traits: Vec::new(),
            progeny: BTreeMap::new(),
        };
        match id {
            MOUSE_X_LION | WH_X_PU => {
                let (mother, father) = if id == MOUSE_X_LION {
                    ("Mouse", "Lion")
                } else {
                    ("Wh", "Pu")
                };
                for _ in 0..replicates {
                    let (plot, tag) = self.next_plot();
                    let kids = self.cross_stocks(mother, father, plot)?;
                    if id == WH_X_PU && !self.has_hybrid() {
                        if let Some(h) = kids.iter().find(|k| k.flower() == Some("Pu")) {
                            self.stocks.insert("Hy".into(), h.clone());
                        }
                    }
                    for k in &kids {
                        *run.progeny
                            .entry(k.flower().unwrap_or(NONE).to_string())
                            .or_insert(0) += 1;
                    }
                    run.labels
                        .push(if kids.is_empty() { NONE } else { PROGENY }.into());
                    run.tags.push(tag);
                    run.traits.extend(kids.into_iter().map(|k| k.traits));
                }
            }
            WH_X_WH | WH_X_PU_SWAP | PU_X_PU_SWAP => {
                let pairs: [(&str, &str); 2] = match id {
                    WH_X_WH => [("Wh", "Wh"), ("Pu", "Pu")],
                    WH_X_PU_SWAP => [("Pu", "Wh"), ("Wh", "Pu")],
                    _ => [("Pu", "Pu"), ("Pu", "Pu")],
                };
                for _ in 0..replicates {
                    let (plot, tag) = self.next_plot();
                    let a = self.cross_stocks(pairs[0].0, pairs[0].1, plot)?;
                    let b = self.cross_stocks(pairs[1].0, pairs[1].1, plot)?;
                    if let (Some(x), Some(y)) = (a.first(), b.first()) {
                        run.labels.push(format!(
                            "{}/{}",
                            x.flower().unwrap_or(NONE),
                            y.flower().unwrap_or(NONE)
                        ));
                        run.tags.push(tag);
                        run.traits.push(x.traits.clone());
                        run.traits.push(y.traits.clone());
                    }
                }
            }
            PU_X_PU_SELF => {
                let parent = self.stocks["Pu"].clone();
                let normal = parent.phenotypes.clone();
                self.per_child(&mut run, replicates, (&parent, &parent), |kid| {
                    if kid.phenotypes == normal {
                        NORMAL
                    } else {
                        ANOMALOUS
                    }
                    .to_string()
                })?;
            }
            HY_X_HY | HY_X_WH | HY_X_PU => {
                let hy = self.hybrid()?;
                let other = match id {
                    HY_X_HY => hy.clone(),
                    HY_X_WH => self.stocks["Wh"].clone(),
                    _ => self.stocks["Pu"].clone(),
                };
                self.per_child(&mut run, replicates, (&hy, &other), |kid| {
                    kid.flower().unwrap_or(NONE).to_string()
                })?;
            }
            other => return Err(GeneticsError::UnknownDesign(other.to_string())),
        }
        Ok(run)
    }

    /// Crosses until `children` offspring are observed; an empty cross adds
    /// one `none` label.
    fn per_child(
        &mut self,
        run: &mut DesignRun,
        children: usize,
        (mother, father): (&Organism, &Organism),
        label: impl Fn(&Organism) -> String,
    ) -> Result<(), GeneticsError> {
        let mut seen = 0;
        let mut empties = 0;
        while seen < children {
            let (plot, tag) = self.next_plot();
            let kids = self
                .genome
                .cross_in_plot(mother, father, plot, &mut self.rng)?;
            if kids.is_empty() {
                run.labels.push(NONE.into());
                run.tags.push(tag);
                empties += 1;
                if empties >= children {
                    break;
                }
                continue;
            }
            for kid in kids.into_iter().take(children - seen) {
                run.labels.push(label(&kid));
                run.tags.push(tag.clone());
                run.traits.push(kid.traits);
                seen += 1;
            }
        }
        Ok(())
    }
}
