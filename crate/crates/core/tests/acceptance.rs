use std::collections::BTreeMap;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::process::ExitCode;
use std::time::{Duration, Instant};

use infoplan::cli::transcript_json;
use infoplan::estimators::{empirical_information, potential_information, ObservationSample};
use infoplan::genetics::{
    Genome, InheritanceModel, World, WorldConfig, FLOWER_LOCUS, HY_X_HY, HY_X_PU, HY_X_WH,
    MOUSE_X_LION, PU_X_PU_SELF, PU_X_PU_SWAP, WH_X_PU, WH_X_PU_SWAP, WH_X_WH,
};
use infoplan::infocore::{entropy_of, DiscreteDistribution, GaussianTraitModel, OutcomeSpace};
use infoplan::mixtures::{HypothesisMixture, ModelSpec};
use infoplan::planner::{
    bad_weather_curve, control_information, env_factor_curve, expectation_ip, technical_failure_mi,
    ExperimentDesign, SufficientStatistic, YieldCurve,
};
use infoplan::robomendel::{
    novel_trait_divergence, run_sequence, BeliefState, Path, PlannerOptions, Transcript,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

fn check(ok: bool, msg: impl Into<String>) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg.into())
    }
}

fn close(name: &str, got: f64, want: f64, tol: f64) -> Result<(), String> {
    check(
        (got - want).abs() <= tol,
        format!("{name} = {got:.10}, expected {want} within {tol:e}"),
    )
}

fn h2(p: f64) -> f64 {
    entropy_of(&[p, 1.0 - p])
}

fn canonical() -> Transcript {
    run_sequence(
        WorldConfig::default(),
        BeliefState::initial(),
        &PlannerOptions::default(),
        Path::Canonical,
    )
    .expect("canonical run")
}

fn score(t: &Transcript, cycle: usize, id: &str) -> f64 {
    t.cycles[cycle - 1]
        .scores
        .iter()
        .find(|s| s.id == id)
        .unwrap_or_else(|| panic!("{id} not scored in cycle {cycle}"))
        .score
}

fn dist(pairs: &[(&str, f64)]) -> DiscreteDistribution {
    DiscreteDistribution::from_pairs(pairs.iter().copied()).unwrap()
}

/// Two hypotheses with prior weight `w` on the first, as a design of `n` replicates.
fn two_way(
    id: &str,
    a: DiscreteDistribution,
    b: DiscreteDistribution,
    w: f64,
    n: usize,
) -> (ExperimentDesign, HypothesisMixture<DiscreteDistribution>) {
    let unit = dist(&[("x", 1.0)]);
    let design = ExperimentDesign::new(
        id,
        BTreeMap::from([("a".to_string(), a), ("b".to_string(), b)]),
        n,
    )
    .unwrap();
    let m = HypothesisMixture::with_prior(
        vec![("a".into(), unit.clone()), ("b".into(), unit)],
        vec![w, 1.0 - w],
    )
    .unwrap();
    (design, m)
}

fn fastest<T>(mut f: impl FnMut() -> T) -> (T, Duration) {
    let mut best = Duration::MAX;
    let mut out = None;
    for _ in 0..5 {
        let start = Instant::now();
        let v = f();
        best = best.min(start.elapsed());
        out = Some(v);
    }
    (out.unwrap(), best)
}

fn mouse_x_lion() -> Outcome {
    let (design, m) = two_way(
        MOUSE_X_LION,
        dist(&[("none", 1.0), ("progeny", 0.0)]),
        dist(&[("none", 0.0), ("progeny", 1.0)]),
        0.999,
        1,
    );
    let (e, took) = fastest(|| expectation_ip(&design, &m).unwrap());
    let want = 0.011408;
    close("E(Ip)", e, want, 1e-6)?;
    close("H(0.999)", e, h2(0.999), 1e-12)?;
    close(
        "planner score",
        score(&canonical(), 1, MOUSE_X_LION),
        e,
        1e-12,
    )?;
    check(took < Duration::from_millis(1), format!("took {took:?}"))?;
    Ok(format!("{e:.6} bits in {took:?}"))
}

fn wh_x_wh() -> Outcome {
    let s = score(&canonical(), 1, WH_X_WH);
    close("Wh x Wh", s, 0.5, 1e-9)?;
    Ok(format!("{s:.10} bits"))
}

fn swap() -> Outcome {
    let t = canonical();
    let s = score(&t, 3, WH_X_PU_SWAP);
    close("Wh x Pu swap", s, 1.0, 1e-9)?;
    Ok(format!("{s:.10} bits"))
}

fn ln_choose(n: u64, k: u64) -> f64 {
    (1..=k)
        .map(|i| ((n - k + i) as f64).ln() - (i as f64).ln())
        .sum()
}

/// Brute force over white counts: half the belief expects white at rate `q`,
/// half expects no white.
fn white_count_oracle(q: f64, n: u64) -> f64 {
    let pmf: Vec<f64> = (0..=n)
        .map(|k| (ln_choose(n, k) + k as f64 * q.ln() + (n - k) as f64 * (1.0 - q).ln()).exp())
        .collect();
    let mut mix: Vec<f64> = pmf.iter().map(|p| 0.5 * p).collect();
    mix[0] += 0.5;
    entropy_of(&mix) - 0.5 * entropy_of(&pmf)
}

fn hybrid_crosses() -> Outcome {
    let purple = dist(&[("Pu", 1.0), ("Wh", 0.0)]);
    let (hh, m1) = two_way(
        HY_X_HY,
        dist(&[("Pu", 0.75), ("Wh", 0.25)]),
        purple.clone(),
        0.5,
        20,
    );
    let (hw, m2) = two_way(HY_X_WH, dist(&[("Pu", 0.5), ("Wh", 0.5)]), purple, 0.5, 20);
    let ((a, b), took) = fastest(|| {
        (
            expectation_ip(&hh, &m1).unwrap(),
            expectation_ip(&hw, &m2).unwrap(),
        )
    });
    close("Hy x Hy", a, 0.984, 0.005)?;
    close("Hy x Hy vs oracle", a, white_count_oracle(0.25, 20), 1e-9)?;
    close("Hy x Wh", b, 1.0, 0.001)?;
    close("Hy x Wh vs oracle", b, white_count_oracle(0.5, 20), 1e-9)?;
    let t = canonical();
    close("planner Hy x Hy", score(&t, 4, HY_X_HY), a, 1e-9)?;
    close("planner Hy x Wh", score(&t, 4, HY_X_WH), b, 1e-9)?;
    check(took < Duration::from_millis(10), format!("took {took:?}"))?;
    Ok(format!("Hy x Hy {a:.6}, Hy x Wh {b:.6} bits in {took:?}"))
}

fn self_cross() -> Outcome {
    let o = PlannerOptions::default();
    let s = score(&canonical(), 5, PU_X_PU_SELF);
    let d = novel_trait_divergence(0.5, o.novel_trait_width, o.novel_trait_sd);
    close("self-cross", s, 1.6374, 0.005)?;
    close("D(Wh || mixture)", d, 3.2748, 0.005)?;
    Ok(format!("score {s:.4}, divergence {d:.4} bits"))
}

fn technical_failure() -> Outcome {
    let v = technical_failure_mi(0.5, 0.3, false).unwrap();
    close("no-control MI", v, 0.4935, 1e-4)?;
    let grid: Vec<f64> = (0..=20).map(|i| i as f64 / 20.0).collect();
    let c: Vec<f64> = grid
        .iter()
        .map(|&f| technical_failure_mi(0.5, f, true).unwrap())
        .collect();
    let (c0, c1) = (c[0], c[20]);
    let chord = grid
        .iter()
        .zip(&c)
        .map(|(f, y)| (y - (c0 + (c1 - c0) * f)).abs())
        .fold(0.0, f64::max);
    check(chord < 1e-12, format!("chord deviation {chord:e}"))?;
    for (f, y) in grid.iter().zip(&c) {
        close("control MI", *y, (1.0 - f) * h2(0.5), 1e-12)?;
    }
    for a in 1..20 {
        for &f in &grid {
            let ic = control_information(a as f64 / 20.0, f).unwrap();
            check(
                ic >= -1e-12,
                format!("control information {ic} at alpha {a}/20, f {f}"),
            )?;
        }
    }
    Ok(format!("MI {v:.6}, chord deviation {chord:e}"))
}

fn monotone(c: &YieldCurve) -> bool {
    c.values().windows(2).all(|w| w[1] >= w[0] - 1e-12)
}

fn bad_weather() -> Outcome {
    let plain = bad_weather_curve(0.3, 0.5, false, 20).unwrap();
    let ctrl = bad_weather_curve(0.3, 0.5, true, 20).unwrap();
    let (a, b) = (plain.value_at(1).unwrap(), ctrl.value_at(1).unwrap());
    close("no control n=1", a, 0.4934, 1e-4)?;
    close("control n=1", b, 0.7, 1e-4)?;
    check(monotone(&plain) && monotone(&ctrl), "curves not monotone")?;
    let (ca, cb) = (plain.value_at(20).unwrap(), ctrl.value_at(20).unwrap());
    close("no control n=20", ca, 1.0, 0.01)?;
    close("control n=20", cb, 1.0, 0.01)?;
    Ok(format!("n=1 {a:.4} / {b:.4}, n=20 {ca:.4} / {cb:.4}"))
}

fn env_factor() -> Outcome {
    let plain = env_factor_curve(0.3, 0.5, false, 60).unwrap();
    let ctrl = env_factor_curve(0.3, 0.5, true, 5).unwrap();
    let a = plain.value_at(1).unwrap();
    close("no control n=1", a, 0.31067, 1e-4)?;
    check(monotone(&plain), "curve not monotone")?;
    let far = plain.value_at(60).unwrap();
    close("no control n=60", far, 0.5, 1e-6)?;
    close("bound", plain.bound, 0.5, 1e-12)?;
    close("control n=1", ctrl.value_at(1).unwrap(), 0.5, 1e-12)?;
    Ok(format!(
        "n=1 {a:.6}, n=60 {far:.8}, control {:.4}",
        ctrl.value_at(1).unwrap()
    ))
}

/// Reference rankings per cycle as (design, displayed value), best first.
fn tables() -> Vec<Vec<(&'static str, f64)>> {
    vec![
        vec![
            (WH_X_WH, 0.5),
            (WH_X_PU, 0.09),
            (MOUSE_X_LION, 0.01),
            (WH_X_PU_SWAP, 1.2e-6),
            (PU_X_PU_SWAP, 0.0),
            (PU_X_PU_SELF, 0.0),
        ],
        vec![
            (WH_X_PU, 0.19),
            (MOUSE_X_LION, 0.01),
            (PU_X_PU_SWAP, 0.001),
            (WH_X_WH, 0.001),
            (PU_X_PU_SELF, 0.0),
            (WH_X_PU_SWAP, 0.0),
        ],
        vec![
            (WH_X_PU_SWAP, 1.0),
            (MOUSE_X_LION, 0.01),
            (PU_X_PU_SWAP, 0.001),
            (WH_X_WH, 0.001),
            (PU_X_PU_SELF, 0.0),
            (WH_X_PU, 0.0),
        ],
        vec![
            (HY_X_WH, 1.0),
            (HY_X_HY, 0.98),
            (MOUSE_X_LION, 0.01),
            (PU_X_PU_SWAP, 0.001),
            (WH_X_WH, 0.001),
            (PU_X_PU_SELF, 0.0),
            (WH_X_PU, 0.0),
            (WH_X_PU_SWAP, 0.0),
            (HY_X_PU, 0.0),
        ],
        vec![
            (PU_X_PU_SELF, 1.64),
            (MOUSE_X_LION, 0.01),
            (PU_X_PU_SWAP, 0.001),
            (WH_X_WH, 0.001),
            (HY_X_HY, 0.001),
            (HY_X_WH, 0.001),
            (WH_X_PU, 0.0),
            (WH_X_PU_SWAP, 0.0),
            (HY_X_PU, 0.0),
        ],
    ]
}

fn sequence() -> Outcome {
    let t = canonical();
    let chosen: Vec<Vec<String>> = t
        .chosen()
        .into_iter()
        .map(|mut c| {
            c.sort();
            c
        })
        .collect();
    let want: Vec<Vec<String>> = vec![
        vec![WH_X_WH.into()],
        vec![WH_X_PU.into()],
        vec![WH_X_PU_SWAP.into()],
        vec![HY_X_HY.into(), HY_X_WH.into()],
        vec![PU_X_PU_SELF.into()],
    ];
    check(chosen == want, format!("chosen {chosen:?}"))?;
    for (i, table) in tables().iter().enumerate() {
        let cycle = i + 1;
        let ours = &t.cycles[i].scores;
        for extra in ours
            .iter()
            .filter(|o| !table.iter().any(|(id, _)| *id == o.id))
        {
            check(
                extra.score == 0.0,
                format!(
                    "table {cycle}: unlisted {} scores {}",
                    extra.id, extra.score
                ),
            )?;
        }
        let s: Vec<f64> = table.iter().map(|(id, _)| score(&t, cycle, id)).collect();
        for (j, (id, shown)) in table.iter().enumerate() {
            if *shown == 0.0 {
                check(
                    s[j] == 0.0,
                    format!("table {cycle}: {id} scores {} not 0", s[j]),
                )?;
            }
            if *shown == 0.001 {
                check(
                    s[j] <= 0.012,
                    format!("table {cycle}: resolved {id} scores {}", s[j]),
                )?;
            }
            if j + 1 < table.len() {
                let (next, next_shown) = table[j + 1];
                let ordered = if shown - next_shown >= 0.005 {
                    s[j] > s[j + 1]
                } else {
                    s[j] >= s[j + 1]
                };
                check(
                    ordered,
                    format!("table {cycle}: {id} {} vs {next} {}", s[j], s[j + 1]),
                )?;
            }
        }
    }
    let top = t.final_scores.first().map(|s| s.score).unwrap_or(0.0);
    check(top <= 0.012, format!("resolved world still scores {top}"))?;
    let ratio = score(&t, 2, WH_X_PU) / score(&t, 1, WH_X_PU);
    close("Wh x Pu doubling", ratio, 2.0, 0.2)?;
    Ok(format!(
        "5 cycles, tables 1-5 ordered, doubling ratio {ratio:.4}, residual {top:.4}"
    ))
}

fn normals(rng: &mut ChaCha8Rng, mean: f64, n: usize) -> Vec<f64> {
    let d = Normal::new(mean, 1.0).unwrap();
    (0..n).map(|_| d.sample(rng)).collect()
}

fn flower_observations() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let purple = GaussianTraitModel::unit(0.0);

    let mut xs = normals(&mut rng, 0.0, 100);
    xs.insert(42, normals(&mut rng, 10.0, 1)[0]);
    let one =
        potential_information(&ObservationSample::values(xs).unwrap(), &purple, 0.95).unwrap();
    let odd = one.per_observation[42];
    check(odd > 50.0, format!("(a) single white flower Ip {odd}"))?;
    check(
        one.lower_bound <= 0.0,
        format!("(a) lower bound {}", one.lower_bound),
    )?;

    let mut ys = normals(&mut rng, 0.0, 100);
    ys.extend(normals(&mut rng, 10.0, 100));
    let many =
        potential_information(&ObservationSample::values(ys).unwrap(), &purple, 0.95).unwrap();
    check(
        many.lower_bound > 10.0,
        format!("(b) lower bound {}", many.lower_bound),
    )?;

    let updated = ModelSpec::GaussianMixture {
        weights: vec![0.5, 0.5],
        components: vec![
            GaussianTraitModel::unit(0.0),
            GaussianTraitModel::unit(10.0),
        ],
    };
    let mut fresh = normals(&mut rng, 0.0, 100);
    fresh.extend(normals(&mut rng, 10.0, 100));
    let fresh = ObservationSample::values(fresh).unwrap();
    let ip = potential_information(&fresh, &purple, 0.95).unwrap().mean;
    let ie = empirical_information(&fresh, &updated, &purple).unwrap();
    check(ie >= 0.9 * ip, format!("(c) Ie {ie} vs Ip {ip}"))?;

    let flowers = 4;
    let labels: Vec<String> = (0..1u32 << flowers)
        .map(|bits| {
            (0..flowers)
                .map(|i| if bits >> i & 1 == 1 { "Wh" } else { "Pu" })
                .collect::<Vec<_>>()
                .join(",")
        })
        .collect();
    let independent = DiscreteDistribution::uniform(&OutcomeSpace::new(labels).unwrap());
    let plants: Vec<String> = (0..100)
        .map(|_| {
            let c = if rng.random::<bool>() { "Wh" } else { "Pu" };
            vec![c; flowers].join(",")
        })
        .collect();
    let residual = potential_information(
        &ObservationSample::labels(plants).unwrap(),
        &independent,
        0.95,
    )
    .unwrap();
    check(
        residual.lower_bound > 0.0,
        format!("(d) lower bound {}", residual.lower_bound),
    )?;

    Ok(format!(
        "(a) {odd:.1} bits, lb {:.3}; (b) lb {:.1}; (c) Ie/Ip {:.3}; (d) lb {:.3} bits",
        one.lower_bound,
        many.lower_bound,
        ie / ip,
        residual.lower_bound
    ))
}

fn brute_force_mi(weights: &[f64], rows: &[Vec<f64>], n: usize) -> f64 {
    let k = rows[0].len();
    let mut total = 0.0;
    for code in 0..k.pow(n as u32) {
        let (mut c, mut l) = (code, vec![1.0; rows.len()]);
        for _ in 0..n {
            for (li, r) in l.iter_mut().zip(rows) {
                *li *= r[c % k];
            }
            c /= k;
        }
        let px: f64 = weights.iter().zip(&l).map(|(w, x)| w * x).sum();
        for (w, x) in weights.iter().zip(&l) {
            if w * x > 0.0 {
                total += w * x * (x / px).log2();
            }
        }
    }
    total
}

fn normalized(rng: &mut ChaCha8Rng, k: usize, allow_zero: bool) -> Vec<f64> {
    let mut v: Vec<f64> = (0..k)
        .map(|_| {
            if allow_zero && rng.random::<f64>() < 0.2 {
                0.0
            } else {
                rng.random::<f64>() + 0.01
            }
        })
        .collect();
    if v.iter().all(|&x| x == 0.0) {
        v[0] = 1.0;
    }
    let s: f64 = v.iter().sum();
    v.iter().map(|x| x / s).collect()
}

fn convergence() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut worst: f64 = 0.0;
    for case in 0..50 {
        let hyps = rng.random_range(2..=3);
        let outcomes = rng.random_range(2..=4);
        let n = rng.random_range(1..=3);
        let space = OutcomeSpace::new((0..outcomes).map(|i| format!("o{i}"))).unwrap();
        let rows: Vec<Vec<f64>> = (0..hyps)
            .map(|_| normalized(&mut rng, outcomes, true))
            .collect();
        let weights = normalized(&mut rng, hyps, false);
        let statistic = if case % 2 == 0 {
            SufficientStatistic::Counts
        } else {
            SufficientStatistic::FullSequence
        };
        let outcomes_by_id: BTreeMap<String, DiscreteDistribution> = rows
            .iter()
            .enumerate()
            .map(|(i, r)| {
                (
                    format!("h{i}"),
                    DiscreteDistribution::new(space.clone(), r.clone()).unwrap(),
                )
            })
            .collect();
        let design = ExperimentDesign::new("random", outcomes_by_id.clone(), n)
            .unwrap()
            .with_statistic(statistic);
        let m =
            HypothesisMixture::with_prior(outcomes_by_id.into_iter().collect(), weights.clone())
                .unwrap();
        let e = expectation_ip(&design, &m).unwrap();
        let brute = brute_force_mi(&weights, &rows, n);
        worst = worst.max((e - brute).abs());
        close(&format!("case {case}"), e, brute, 1e-9)?;
    }
    Ok(format!("50 cases, worst difference {worst:e}"))
}

fn genetics() -> Outcome {
    let n = 10_000;
    let genome = Genome::new(WorldConfig {
        seeds_per_cross: n,
        ..WorldConfig::default()
    })
    .unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let stocks = World::new(genome.config.clone()).unwrap();
    let mut genotype = stocks.stock("Pu").unwrap().genotype.clone();
    genotype.insert(FLOWER_LOCUS.into(), ("pu".into(), "wh".into()));
    let het = genome.organism("pea", genotype, false, &mut rng).unwrap();
    let kids = genome.self_cross(&het, &mut rng).unwrap();
    let white = kids.iter().filter(|k| k.flower() == Some("Wh")).count();
    let sd = (n as f64 * 0.25 * 0.75).sqrt();
    check(
        (white as f64 - n as f64 * 0.25).abs() <= 3.0 * sd,
        format!("{white} recessive of {n}"),
    )?;

    let lfls = Genome::new(WorldConfig {
        inheritance_model: InheritanceModel::Lfls,
        ..WorldConfig::default()
    })
    .unwrap();
    let mouse = lfls
        .organism("mouse", BTreeMap::new(), false, &mut rng)
        .unwrap();
    let lion = lfls
        .organism("lion", BTreeMap::new(), false, &mut rng)
        .unwrap();
    for _ in 0..1000 {
        check(
            lfls.cross(&mouse, &lion, &mut rng).unwrap().is_empty(),
            "inter-species progeny",
        )?;
        check(
            lfls.cross(&lion, &mouse, &mut rng).unwrap().is_empty(),
            "inter-species progeny",
        )?;
    }

    let run = |seed| {
        let cfg = WorldConfig {
            rng_seed: seed,
            ..WorldConfig::default()
        };
        transcript_json(
            &run_sequence(
                cfg,
                BeliefState::initial(),
                &PlannerOptions::default(),
                Path::Canonical,
            )
            .unwrap(),
        )
    };
    let (a, b) = (run(31), run(31));
    check(a == b, "transcripts differ")?;
    Ok(format!("recessive fraction {:.4}, 2000 empty inter-species crosses, transcripts identical ({} bytes)", white as f64 / n as f64, a.len()))
}

fn main() -> ExitCode {
    let criteria: [Criterion; 12] = [
        ("mouse x lion score", mouse_x_lion),
        ("wh x wh initial score", wh_x_wh),
        ("swap score", swap),
        ("hybrid crosses at n=20", hybrid_crosses),
        ("self-cross score", self_cross),
        ("technical-failure curve", technical_failure),
        ("bad-weather yield curve", bad_weather),
        ("environmental-factor curve", env_factor),
        ("sequence reproduction", sequence),
        ("flower observation properties", flower_observations),
        ("convergence to mutual information", convergence),
        ("monte-carlo genetics", genetics),
    ];
    let mut failed = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        let result = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|e| {
            Err(e
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default())
        });
        match result {
            Ok(detail) => println!("PASS {:>2} {name}: {detail}", i + 1),
            Err(why) => {
                failed += 1;
                println!("FAIL {:>2} {name}: {why}", i + 1);
            }
        }
    }
    println!(
        "{} of {} criteria passed",
        criteria.len() - failed,
        criteria.len()
    );
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
