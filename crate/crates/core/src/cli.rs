//! Command-line front end: `eval`, `curve`, `run` and `ip`.

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path as FsPath, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::estimators::{self, Observation, ObservationSample};
use crate::genetics::WorldConfig;
use crate::mixtures::ModelSpec;
use crate::planner;
use crate::robomendel::{self, BeliefState, Path, PlannerOptions, RoboError, Transcript};

#[derive(Debug, Error)]
pub enum CliError {
    /// Bad arguments, configuration or input files.
    #[error("{0}")]
    Usage(String),
    /// The simulation contradicted every model in play.
    #[error("{0}")]
    Runtime(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Runtime(_) => 3,
        }
    }
}

fn usage(e: impl std::fmt::Display) -> CliError {
    CliError::Usage(e.to_string())
}

impl From<RoboError> for CliError {
    fn from(e: RoboError) -> Self {
        match e {
            RoboError::InvalidOption(_) | RoboError::UnknownDesign(_) => {
                CliError::Usage(e.to_string())
            }
            other => CliError::Runtime(other.to_string()),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    #[serde(default)]
    pub world: WorldConfig,
    #[serde(default)]
    pub initial_beliefs: BTreeMap<String, f64>,
    #[serde(default)]
    pub planner: PlannerOptions,
    #[serde(default)]
    pub models: BTreeMap<String, ModelSpec>,
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
}

impl ScenarioConfig {
    pub fn parse(text: &str, origin: &str) -> Result<Self, CliError> {
        let cfg: Self = serde_json::from_str(text)
            .map_err(|e| CliError::Usage(format!("{origin}:{}:{}: {e}", e.line(), e.column())))?;
        cfg.validate()
            .map_err(|e| CliError::Usage(format!("{origin}: {e}")))?;
        Ok(cfg)
    }

    pub fn load(path: &FsPath) -> Result<Self, CliError> {
        let text = fs::read_to_string(path)
            .map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))?;
        Self::parse(&text, &path.display().to_string())
    }

    pub fn validate(&self) -> Result<(), String> {
        self.world.validate().map_err(|e| e.to_string())?;
        self.planner.validate().map_err(|e| e.to_string())?;
        for (k, v) in &self.initial_beliefs {
            if !(0.0..=1.0).contains(v) {
                return Err(format!("initial belief `{k}` = {v} is not a probability"));
            }
        }
        for (name, m) in &self.models {
            m.validate().map_err(|e| format!("model `{name}`: {e}"))?;
        }
        Ok(())
    }

    pub fn initial_belief(&self) -> BeliefState {
        BeliefState::with_priors(&self.initial_beliefs)
    }
}

#[derive(Debug, Parser)]
#[command(
    name = "infoplan",
    version,
    about = "Information-driven experiment planning"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Copy, ValueEnum, PartialEq, Eq)]
enum Format {
    Text,
    Json,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum CurveKind {
    BadWeather,
    TechFailure,
    EnvFactor,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum PathArg {
    Canonical,
    PuUndilutable,
    SpeciesHybrid,
}

impl From<PathArg> for Path {
    fn from(p: PathArg) -> Self {
        match p {
            PathArg::Canonical => Path::Canonical,
            PathArg::PuUndilutable => Path::PuUndilutable,
            PathArg::SpeciesHybrid => Path::SpeciesHybrid,
        }
    }
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Score the standard experiment set for a belief state.
    Eval {
        #[arg(long)]
        config: Option<PathBuf>,
        /// Belief state JSON (as written by `run --out`).
        #[arg(long)]
        state: Option<PathBuf>,
        #[arg(long, value_enum, default_value = "text")]
        format: Format,
    },
    /// Emit a yield curve as CSV.
    Curve {
        #[arg(value_enum)]
        kind: CurveKind,
        /// Bad-weather or environmental-factor probability.
        #[arg(long, default_value_t = 0.3)]
        p: f64,
        /// Prior of the hypothesis under test.
        #[arg(long, default_value_t = 0.5)]
        prior: f64,
        /// Prior of the positive hypothesis for tech-failure.
        #[arg(long, default_value_t = 0.5)]
        alpha: f64,
        /// Grid step in f for tech-failure.
        #[arg(long, default_value_t = 0.05)]
        step: f64,
        #[arg(long, default_value_t = 20)]
        n_max: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run the planning loop against the simulated world.
    Run {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, value_enum, default_value = "canonical")]
        path: PathArg,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, value_enum, default_value = "json")]
        format: Format,
    },
    /// Potential information of a sample against a configured model.
    Ip {
        observations: PathBuf,
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        model: String,
        #[arg(long, default_value_t = 5)]
        k: usize,
        #[arg(long, default_value_t = estimators::DEFAULT_CONFIDENCE)]
        confidence: f64,
        #[arg(long, value_enum, default_value = "text")]
        format: Format,
    },
}

/// Parses arguments and returns everything destined for stdout.
pub fn run<I, T>(args: I) -> Result<String, CliError>
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            return match e.kind() {
                clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion => {
                    Ok(e.render().to_string())
                }
                _ => Err(CliError::Usage(
                    e.render().to_string().trim_end().to_string(),
                )),
            }
        }
    };
    match cli.command {
        Command::Eval {
            config,
            state,
            format,
        } => cmd_eval(config.as_deref(), state.as_deref(), format),
        Command::Curve {
            kind,
            p,
            prior,
            alpha,
            step,
            n_max,
            out,
        } => {
            let csv = cmd_curve(kind, p, prior, alpha, step, n_max)?;
            match out {
                Some(path) => {
                    fs::write(&path, &csv)
                        .map_err(|e| usage(format!("{}: {e}", path.display())))?;
                    Ok(String::new())
                }
                None => Ok(csv),
            }
        }
        Command::Run {
            config,
            seed,
            path,
            out,
            format,
        } => cmd_run(config.as_deref(), seed, path.into(), out, format),
        Command::Ip {
            observations,
            config,
            model,
            k,
            confidence,
            format,
        } => cmd_ip(&observations, &config, &model, k, confidence, format),
    }
}

fn load_config(path: Option<&FsPath>) -> Result<ScenarioConfig, CliError> {
    path.map_or_else(|| Ok(ScenarioConfig::default()), ScenarioConfig::load)
}

fn bits(v: f64) -> String {
    format!("{v:.4}")
}

fn cmd_eval(
    config: Option<&FsPath>,
    state: Option<&FsPath>,
    format: Format,
) -> Result<String, CliError> {
    let cfg = load_config(config)?;
    let belief = match state {
        Some(p) => {
            let text = fs::read_to_string(p).map_err(|e| usage(format!("{}: {e}", p.display())))?;
            let b: BeliefState = serde_json::from_str(&text)
                .map_err(|e| usage(format!("{}:{}:{}: {e}", p.display(), e.line(), e.column())))?;
            b.validate()?;
            b
        }
        None => cfg.initial_belief(),
    };
    let scores = robomendel::evaluate_cycle(&belief, &cfg.planner)?;
    let chosen = robomendel::choose(&scores, &cfg.planner);
    match format {
        Format::Json => {
            #[derive(Serialize)]
            struct Table<'a> {
                scores: &'a [planner::ScoredDesign],
                chosen: &'a [String],
            }
            Ok(serde_json::to_string_pretty(&Table {
                scores: &scores,
                chosen: &chosen,
            })
            .expect("serializable")
                + "\n")
        }
        Format::Text => {
            let mut out = String::from("experiment        E(Ip) bits\n");
            for s in &scores {
                let _ = writeln!(out, "{:<16}  {}", s.id, bits(s.score));
            }
            let _ = writeln!(out, "next: {}", chosen.join(" + "));
            Ok(out)
        }
    }
}

fn cmd_curve(
    kind: CurveKind,
    p: f64,
    prior: f64,
    alpha: f64,
    step: f64,
    n_max: usize,
) -> Result<String, CliError> {
    let mut out = String::new();
    match kind {
        CurveKind::TechFailure => {
            if !(step > 0.0 && step <= 1.0) {
                return Err(usage("--step must lie in (0, 1]"));
            }
            out.push_str("f,no_control,control,control_information\n");
            let steps = (1.0 / step).round() as usize;
            for i in 0..=steps {
                let f = (i as f64 * step).min(1.0);
                let no = planner::technical_failure_mi(alpha, f, false).map_err(usage)?;
                let yes = planner::technical_failure_mi(alpha, f, true).map_err(usage)?;
                let _ = writeln!(out, "{f},{no},{yes},{}", yes - no);
            }
        }
        CurveKind::BadWeather | CurveKind::EnvFactor => {
            let curve = |control| match kind {
                CurveKind::BadWeather => planner::bad_weather_curve(p, prior, control, n_max),
                _ => planner::env_factor_curve(p, prior, control, n_max),
            };
            let no = curve(false).map_err(usage)?;
            let yes = curve(true).map_err(usage)?;
            out.push_str("n,e_ip_bits,rate_bits_per_replicate,control_e_ip_bits,control_rate_bits_per_replicate\n");
            for i in 0..no.points.len() {
                let _ = writeln!(
                    out,
                    "{},{},{},{},{}",
                    no.points[i].0, no.points[i].1, no.rates[i], yes.points[i].1, yes.rates[i]
                );
            }
        }
    }
    Ok(out)
}

/// Human-readable summary of a transcript.
pub fn transcript_log(t: &Transcript) -> String {
    let mut out = String::new();
    for c in &t.cycles {
        let top: Vec<String> = c
            .chosen
            .iter()
            .map(|id| {
                let s = c
                    .scores
                    .iter()
                    .find(|s| &s.id == id)
                    .map_or(0.0, |s| s.score);
                format!("{id} ({} bits)", bits(s))
            })
            .collect();
        let _ = writeln!(out, "cycle {}: {}", c.cycle, top.join(" + "));
        for o in &c.observed {
            let counts: Vec<String> = o.counts.iter().map(|(k, v)| format!("{k}={v}")).collect();
            let _ = writeln!(out, "  observed {}: {}", o.design, counts.join(" "));
        }
        for (k, v) in &c.belief_after.probabilities {
            if c.belief_before.probabilities.get(k) != Some(v) {
                let before = c
                    .belief_before
                    .probabilities
                    .get(k)
                    .map_or("-".into(), |b| bits(*b));
                let _ = writeln!(out, "  p({k}): {before} -> {}", bits(*v));
            }
        }
    }
    let reason = match t.stop_reason {
        robomendel::StopReason::Exhausted => "no experiment worth running",
        robomendel::StopReason::AlternativeRejected => "alternative model rejected",
    };
    let best = t.final_scores.first().map_or(String::new(), |s| {
        format!("; best remaining {} ({} bits)", s.id, bits(s.score))
    });
    let _ = writeln!(out, "stopped: {reason}{best}");
    if !t.final_belief.flags.is_empty() {
        let flags: Vec<&str> = t.final_belief.flags.iter().map(String::as_str).collect();
        let _ = writeln!(out, "flags: {}", flags.join(", "));
    }
    out
}

pub fn transcript_json(t: &Transcript) -> String {
    serde_json::to_string_pretty(t).expect("serializable") + "\n"
}

fn cmd_run(
    config: Option<&FsPath>,
    seed: Option<u64>,
    path: Path,
    out: Option<PathBuf>,
    format: Format,
) -> Result<String, CliError> {
    let mut cfg = load_config(config)?;
    if let Some(s) = seed {
        cfg.world.rng_seed = s;
    }
    let transcript =
        robomendel::run_sequence(cfg.world.clone(), cfg.initial_belief(), &cfg.planner, path)?;
    let json = transcript_json(&transcript);
    let log = transcript_log(&transcript);
    if let Some(dir) = out.or(cfg.output_dir.clone()) {
        let write = |name: &str, text: &str| {
            fs::write(dir.join(name), text)
                .map_err(|e| usage(format!("{}: {e}", dir.join(name).display())))
        };
        fs::create_dir_all(&dir).map_err(|e| usage(format!("{}: {e}", dir.display())))?;
        write("transcript.json", &json)?;
        write("log.txt", &log)?;
        for c in &transcript.cycles {
            write(
                &format!("belief-cycle-{}.json", c.cycle),
                &(serde_json::to_string_pretty(&c.belief_after).expect("serializable") + "\n"),
            )?;
        }
    }
    Ok(match format {
        Format::Json => json,
        Format::Text => log,
    })
}

/// One observation per line, optionally preceded by a tag and a comma.
pub fn parse_observations(text: &str, continuous: bool) -> Result<ObservationSample, String> {
    let mut obs = Vec::new();
    let mut tags = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (tag, value) = match line.split_once(',') {
            Some((t, v)) => (Some(t.trim().to_string()), v.trim()),
            None => (None, line),
        };
        let o = if continuous {
            Observation::Value(
                value
                    .parse::<f64>()
                    .map_err(|_| format!("line {}: `{value}` is not a number", i + 1))?,
            )
        } else {
            Observation::Label(value.to_string())
        };
        obs.push(o);
        tags.push(tag);
    }
    if obs.is_empty() {
        return Err("no observations".into());
    }
    ObservationSample::with_tags(obs, tags).map_err(|e| e.to_string())
}

fn cmd_ip(
    file: &FsPath,
    config: &FsPath,
    model: &str,
    k: usize,
    confidence: f64,
    format: Format,
) -> Result<String, CliError> {
    let cfg = ScenarioConfig::load(config)?;
    let spec = cfg.models.get(model).ok_or_else(|| {
        usage(format!(
            "model `{model}` is not defined in {}",
            config.display()
        ))
    })?;
    let text = fs::read_to_string(file).map_err(|e| usage(format!("{}: {e}", file.display())))?;
    let sample = parse_observations(&text, spec.is_continuous())
        .map_err(|e| usage(format!("{}: {e}", file.display())))?;
    let est = estimators::potential_information(&sample, spec, confidence).map_err(usage)?;
    let top = estimators::localize(&est, k);
    let describe = |i: usize| {
        let tag = sample.tags()[i]
            .clone()
            .unwrap_or_else(|| format!("#{}", i + 1));
        (
            tag,
            sample.observations()[i].to_string(),
            est.per_observation[i],
        )
    };
    match format {
        Format::Json => {
            #[derive(Serialize)]
            struct Row {
                index: usize,
                tag: String,
                observation: String,
                bits: f64,
            }
            #[derive(Serialize)]
            struct Report {
                n: usize,
                mean: f64,
                lower_bound: f64,
                confidence: f64,
                top: Vec<Row>,
            }
            let rows = top
                .iter()
                .map(|&i| {
                    let (tag, observation, bits) = describe(i);
                    Row {
                        index: i,
                        tag,
                        observation,
                        bits,
                    }
                })
                .collect();
            let r = Report {
                n: sample.len(),
                mean: est.mean,
                lower_bound: est.lower_bound,
                confidence,
                top: rows,
            };
            Ok(serde_json::to_string_pretty(&r).expect("serializable") + "\n")
        }
        Format::Text => {
            let mut out = String::new();
            let _ = writeln!(out, "observations: {}", sample.len());
            let _ = writeln!(out, "mean Ip: {} bits/obs", bits(est.mean));
            let _ = writeln!(
                out,
                "lower bound ({}%): {} bits/obs",
                confidence * 100.0,
                bits(est.lower_bound)
            );
            for (rank, &i) in top.iter().enumerate() {
                let (tag, o, b) = describe(i);
                let _ = writeln!(out, "{:>3}. {tag} {o}: {} bits", rank + 1, bits(b));
            }
            Ok(out)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn config_errors_carry_position() {
        let err =
            ScenarioConfig::parse("{\n  \"world\": {\"bogus\": 1}\n}", "cfg.json").unwrap_err();
        assert_eq!(err.exit_code(), 2);
        assert!(err.to_string().starts_with("cfg.json:2:"), "{err}");
        let err =
            ScenarioConfig::parse(r#"{"planner": {"clamp_low": 0.9, "clamp_high": 0.1}}"#, "c")
                .unwrap_err();
        assert_eq!(err.exit_code(), 2);
    }

    #[test]
    fn default_config_roundtrip() {
        let cfg = ScenarioConfig::parse("{}", "c").unwrap();
        let json = serde_json::to_string(&cfg).unwrap();
        assert_eq!(ScenarioConfig::parse(&json, "c").unwrap(), cfg);
    }

    #[test]
    fn eval_default_table() {
        let out = run(["infoplan", "eval"]).unwrap();
        let first = out.lines().nth(1).unwrap();
        assert!(
            first.starts_with("wh-x-wh") && first.ends_with("0.5000"),
            "{out}"
        );
    }

    #[test]
    fn curves() {
        let csv = run(["infoplan", "curve", "bad-weather", "--n-max", "10"]).unwrap();
        let row: Vec<f64> = csv
            .lines()
            .nth(1)
            .unwrap()
            .split(',')
            .map(|x| x.parse().unwrap())
            .collect();
        assert_eq!(row[0], 1.0);
        assert!((row[1] - 0.49342260576014463).abs() < 1e-12);
        assert!((row[3] - 0.7).abs() < 1e-12);
        let csv = run(["infoplan", "curve", "tech-failure"]).unwrap();
        assert_eq!(csv.lines().count(), 22);
        let csv = run(["infoplan", "curve", "env-factor", "--n-max", "3"]).unwrap();
        for line in csv.lines().skip(1) {
            let control: f64 = line.split(',').nth(3).unwrap().parse().unwrap();
            assert!((control - 0.5).abs() < 1e-12);
        }
        assert_eq!(
            run(["infoplan", "curve", "env-factor", "--p", "1.5"])
                .unwrap_err()
                .exit_code(),
            2
        );
    }

    #[test]
    fn observations_parse() {
        let s = parse_observations("a,1.5\n\n# note\n2\n", true).unwrap();
        assert_eq!(s.len(), 2);
        assert_eq!(s.tags()[0].as_deref(), Some("a"));
        assert!(parse_observations("", true).is_err());
        assert!(parse_observations("x\n", true).is_err());
    }

    #[test]
    fn bad_arguments_exit_2() {
        assert_eq!(run(["infoplan", "frobnicate"]).unwrap_err().exit_code(), 2);
    }
}
