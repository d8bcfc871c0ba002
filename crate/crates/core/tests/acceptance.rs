//! Acceptance criteria, one PASS/FAIL line each. Exits nonzero on any failure.

use std::process::ExitCode;
use std::time::{Duration, Instant};

use mincr::bandit::{lucb_run, rating_arms, summarize, BanditMethod};
use mincr::functionals::{empirical_bernstein_from_moments, hoeffding_interval};
use mincr::regions::{outer_bound_reject, p_value};
use mincr::volume::{average_volume, covering_size_integral};
use mincr::{
    covering_collection, enumerate_simplex, functional_interval, kl_divergence, log_pmf,
    region_membership, sample_dirichlet, sample_multinomial, Acceleration, ConfidenceRegion,
    Construction, EmpiricalDistribution, LevelSetRegion, LinearFunctional, RegionSpec, Scan,
    SimplexGrid, SimplexPoint,
};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

type Outcome = Result<String, String>;

fn ed(c: &[u64]) -> EmpiricalDistribution {
    EmpiricalDistribution::new(c.to_vec()).unwrap()
}

fn ensure(ok: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg())
    }
}

fn within(elapsed: Duration, limit: Duration) -> Result<(), String> {
    ensure(elapsed <= limit, || {
        format!("took {elapsed:.2?}, limit {limit:?}")
    })
}

fn stars() -> LinearFunctional {
    LinearFunctional::new(vec![0.0, 0.5, 1.0]).unwrap()
}

fn fig1_exact_values() -> Outcome {
    let start = Instant::now();
    let size = enumerate_simplex(3, 5).map_err(|e| e.to_string())?.len();
    ensure(size == 21, || format!("|Δ_3,5| = {size}"))?;
    let s = covering_collection(&SimplexPoint::uniform(3).unwrap(), 5, 0.7)
        .map_err(|e| e.to_string())?;
    let mut members: Vec<Vec<u64>> = s.members().iter().map(|e| e.counts().to_vec()).collect();
    members.sort();
    ensure(
        members == [vec![1, 2, 2], vec![2, 1, 2], vec![2, 2, 1]],
        || format!("S** = {members:?}"),
    )?;
    within(start.elapsed(), Duration::from_secs(1))?;
    Ok(format!("|Δ_3,5| = 21, S** = {members:?}"))
}

fn exhaustive_minimum(probs: &[f64], delta: f64) -> usize {
    let m = probs.len();
    let mut best = m;
    for mask in 1u32..(1 << m) {
        let size = mask.count_ones() as usize;
        if size < best {
            let mass: f64 = (0..m)
                .filter(|i| mask >> i & 1 == 1)
                .map(|i| probs[i])
                .sum();
            if mass >= 1.0 - delta {
                best = size;
            }
        }
    }
    best
}

fn minimal_cardinality() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut cases = 0;
    for (k, n) in [(2usize, 4u64), (2, 6), (3, 4)] {
        let outcomes = enumerate_simplex(k, n).unwrap();
        for _ in 0..50 {
            let p = sample_dirichlet(&mut rng, &vec![1.0; k]).unwrap();
            let probs: Vec<f64> = outcomes
                .iter()
                .map(|e| log_pmf(e, &p).unwrap().exp())
                .collect();
            for delta in [0.1, 0.3] {
                let got = covering_collection(&p, n, delta).unwrap().len();
                let best = exhaustive_minimum(&probs, delta);
                ensure(got == best, || {
                    format!("k={k} n={n} δ={delta} p={p:?}: {got} vs {best}")
                })?;
                cases += 1;
            }
        }
    }
    within(start.elapsed(), Duration::from_secs(120))?;
    Ok(format!("{cases} cases match the exhaustive subset minimum"))
}

fn duality() -> Outcome {
    // 210 lattice points of Δ_3 at resolution 19.
    let grid: Vec<SimplexPoint> = SimplexGrid::new(3, 19).unwrap().iter().collect();
    let outcomes = enumerate_simplex(3, 5).unwrap();
    let mut checks = 0;
    for delta in [0.1, 0.3, 0.7] {
        let spec = RegionSpec::new(Construction::LevelSet, 3, 5, delta).unwrap();
        for p in &grid {
            let s = covering_collection(p, 5, delta).unwrap();
            for phat in &outcomes {
                let region_side = region_membership(p, phat, &spec).unwrap();
                ensure(region_side == s.contains(phat), || {
                    format!("{phat} {p:?} δ={delta}")
                })?;
                checks += 1;
            }
        }
    }
    Ok(format!(
        "{checks} (phat, p, δ) triples over {} grid points, 0 disagreements",
        grid.len()
    ))
}

fn coverage() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let outcomes = enumerate_simplex(3, 10).unwrap();
    let draws = 20_000u64;
    let mut worst = f64::INFINITY;
    for delta in [0.1, 0.3] {
        let regions: Vec<LevelSetRegion> = outcomes
            .iter()
            .map(|e| LevelSetRegion::new(e.clone(), delta).unwrap())
            .collect();
        for _ in 0..30 {
            let p = sample_dirichlet(&mut rng, &[1.0; 3]).unwrap();
            let covered: Vec<bool> = regions.iter().map(|r| r.contains(&p).unwrap()).collect();
            let hits = (0..draws)
                .filter(|_| {
                    let phat = sample_multinomial(&mut rng, &p, 10);
                    covered[outcomes.binary_search(&phat).unwrap()]
                })
                .count();
            let c = hits as f64 / draws as f64;
            let sigma = (c * (1.0 - c) / draws as f64).sqrt();
            ensure(c >= 1.0 - delta - 3.0 * sigma, || {
                format!("δ={delta} p={p:?}: coverage {c}")
            })?;
            worst = worst.min(c - (1.0 - delta));
        }
    }
    within(start.elapsed(), Duration::from_secs(300))?;
    Ok(format!(
        "60 settings, smallest excess over 1-δ = {worst:+.4}"
    ))
}

fn average_volume_optimality() -> Outcome {
    let m = 300;
    let mut details = Vec::new();
    for (k, n, delta) in [(2usize, 4u64, 0.3), (2, 6, 0.1), (3, 5, 0.7)] {
        let totals: Vec<_> = Construction::ALL
            .iter()
            .map(|&c| average_volume(&RegionSpec::new(c, k, n, delta).unwrap(), m).unwrap())
            .collect();
        let level = &totals[0];
        let margin = level.grid_tolerance();
        for other in &totals[1..] {
            ensure(other.total - level.total > margin, || {
                format!(
                    "({k},{n},{delta}): level-set {:.4} vs {} {:.4}, tolerance {margin:.4}",
                    level.total, other.construction, other.total
                )
            })?;
        }
        let integral = covering_size_integral(n, k, delta, m).unwrap();
        let tolerance = 3.0 / m as f64 * integral;
        ensure((level.total - integral).abs() <= tolerance, || {
            format!(
                "({k},{n},{delta}): two-way counting {:.6} vs {integral:.6}",
                level.total
            )
        })?;
        details.push(format!(
            "({k},{n},{delta}) {:.3} < {:.3}, {:.3}",
            level.total, totals[1].total, totals[2].total
        ));
    }
    Ok(format!("M={m}: {}", details.join("; ")))
}

fn outer_bound_soundness() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let mut rejections = 0;
    let mut checks = 0;
    let outcomes = enumerate_simplex(3, 6).unwrap();
    for i in 0..100 {
        let alpha = if i % 2 == 0 { 1.0 } else { 0.2 };
        let p = sample_dirichlet(&mut rng, &[alpha; 3]).unwrap();
        for phat in &outcomes {
            let pv = p_value(phat, &p).unwrap();
            for delta in [0.001, 0.05, 0.3, 0.7] {
                checks += 1;
                if outer_bound_reject(phat, &p, delta).unwrap() {
                    rejections += 1;
                    ensure(pv <= delta, || {
                        format!("{phat} {p:?} δ={delta}: p-value {pv}")
                    })?;
                }
            }
        }
    }
    ensure(rejections > 0, || "the outer bound never rejected".into())?;
    let mut sandwiched = 0;
    for _ in 0..20 {
        let p = sample_dirichlet(&mut rng, &[1.0; 3]).unwrap();
        for phat in enumerate_simplex(3, 8).unwrap() {
            let n = 8.0;
            let kl = kl_divergence(&phat.to_point().unwrap(), &p).unwrap();
            let lp = log_pmf(&phat, &p).unwrap();
            let upper = -n * kl;
            let lower = -3.0 * (n + 1.0_f64).ln() - n * kl;
            ensure(lower - 1e-9 <= lp && lp <= upper + 1e-9, || {
                format!("{phat} {p:?}: {lp}")
            })?;
            sandwiched += 1;
        }
    }
    within(start.elapsed(), Duration::from_secs(120))?;
    Ok(format!(
        "{rejections}/{checks} rejections all sound; {sandwiched} type-class bounds hold"
    ))
}

fn fig3_widths() -> Outcome {
    let f = stars();
    let delta = 0.7;
    let mut rows = Vec::new();
    for n in [10u64, 20, 30, 40, 50] {
        let phat = ed(&[n / 10, n / 10, 8 * n / 10]);
        let spec = RegionSpec::new(Construction::LevelSet, 3, n, delta).unwrap();
        let level = functional_interval(&phat, &f, &spec, Scan::default_for(3, n)).unwrap();
        let mean = f.empirical_mean(&phat).unwrap();
        let hoeff = hoeffding_interval(mean, n, delta, f.range()).unwrap();
        let var = f.sample_variance(&phat).unwrap();
        let eb = empirical_bernstein_from_moments(mean, var, n, delta, f.range()).unwrap();
        ensure(
            level.width() <= hoeff.width() && level.width() <= eb.width(),
            || {
                format!(
                    "n={n}: level-set {} hoeffding {} bernstein {}",
                    level.width(),
                    hoeff.width(),
                    eb.width()
                )
            },
        )?;
        rows.push(format!(
            "n={n} {:.3}/{:.3}/{:.3}",
            level.width(),
            hoeff.width(),
            eb.width()
        ));
    }
    Ok(format!(
        "widths level-set/hoeffding/bernstein: {}",
        rows.join(", ")
    ))
}

fn fig2_nesting() -> Outcome {
    let phat = ed(&[6, 6, 3]);
    let region =
        |c| ConfidenceRegion::new(&phat, &RegionSpec::new(c, 3, 15, 0.7).unwrap()).unwrap();
    let (level, sanov, poly) = (
        region(Construction::LevelSet),
        region(Construction::Sanov),
        region(Construction::Polytope),
    );
    let mut counts = [0usize; 3];
    for p in SimplexGrid::new(3, 200).unwrap().iter() {
        let inside = [
            level.contains(&p).unwrap(),
            sanov.contains(&p).unwrap(),
            poly.contains(&p).unwrap(),
        ];
        for (c, &i) in counts.iter_mut().zip(&inside) {
            *c += i as usize;
        }
        ensure(!inside[0] || (inside[1] && inside[2]), || {
            format!("{p:?} escapes the baselines")
        })?;
    }
    Ok(format!(
        "grid points inside: level-set {}, sanov {}, polytope {}",
        counts[0], counts[1], counts[2]
    ))
}

fn fig4_bandit() -> Outcome {
    let start = Instant::now();
    let arms = rating_arms();
    let level_runs: Vec<_> = (0..50)
        .map(|seed| lucb_run(&arms, 0.05, 0.0, BanditMethod::LevelSet, seed))
        .collect::<Result<_, _>>()
        .map_err(|e| e.to_string())?;
    let correct = level_runs.iter().filter(|r| r.identified_arm == 0).count();
    ensure(correct * 100 >= 95 * level_runs.len(), || {
        format!("arm 1 found in {correct}/50 runs")
    })?;

    let median = |times: Vec<u64>| summarize(&times).unwrap().median;
    let level = median(level_runs[..10].iter().map(|r| r.stopping_time).collect());
    let mut others = Vec::new();
    for method in [BanditMethod::KlBernoulli, BanditMethod::Hoeffding] {
        let times = (0..10)
            .map(|seed| lucb_run(&arms, 0.05, 0.0, method, seed).map(|r| r.stopping_time))
            .collect::<Result<Vec<_>, _>>()
            .map_err(|e| e.to_string())?;
        let m = median(times);
        ensure(level <= m, || {
            format!("level-set median {level} > {method} median {m}")
        })?;
        others.push(format!("{method} {m}"));
    }
    within(start.elapsed(), Duration::from_secs(600))?;
    Ok(format!(
        "medians: levelset {level}, {}; arm 1 found in {correct}/50",
        others.join(", ")
    ))
}

fn membership_performance() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let mut slowest = Duration::ZERO;
    let phats = [
        ed(&[10, 10, 10, 10, 10]),
        ed(&[2, 5, 8, 15, 20]),
        ed(&[0, 1, 4, 15, 30]),
    ];
    for phat in &phats {
        let spec = RegionSpec::new(Construction::LevelSet, 5, 50, 0.05).unwrap();
        let region = ConfidenceRegion::with_acceleration(phat, &spec, Acceleration::NONE).unwrap();
        let center = phat.proportions();
        for _ in 0..4 {
            // Points near phat, where the membership walk does the most work.
            let noise = sample_dirichlet(&mut rng, &[1.0; 5]).unwrap();
            let p = SimplexPoint::new_normalized(
                center
                    .iter()
                    .zip(noise.probs())
                    .map(|(c, e)| 0.85 * c + 0.15 * e)
                    .collect(),
            )
            .unwrap();
            let start = Instant::now();
            region.contains(&p).unwrap();
            slowest = slowest.max(start.elapsed());
        }
    }
    within(slowest, Duration::from_secs(10))?;
    Ok(format!("slowest k=5, n=50 membership check {slowest:.2?}"))
}

fn main() -> ExitCode {
    let criteria: [(&str, fn() -> Outcome); 10] = [
        (
            "1 discrete simplex and covering collection of the uniform",
            fig1_exact_values,
        ),
        (
            "2 minimal cardinality against exhaustive subsets",
            minimal_cardinality,
        ),
        ("3 region and covering collection duality", duality),
        ("4 Monte Carlo coverage", coverage),
        (
            "5 average volume optimality and two-way counting",
            average_volume_optimality,
        ),
        (
            "6 outer bound soundness and type-class bounds",
            outer_bound_soundness,
        ),
        ("7 mean interval widths", fig3_widths),
        ("8 region nesting", fig2_nesting),
        ("9 LUCB stopping times", fig4_bandit),
        ("10 membership performance", membership_performance),
    ];
    let mut failed = 0;
    for (name, run) in criteria {
        let start = Instant::now();
        let outcome = std::panic::catch_unwind(run).unwrap_or_else(|_| Err("panicked".into()));
        match outcome {
            Ok(detail) => println!("PASS criterion {name}: {detail} [{:.1?}]", start.elapsed()),
            Err(why) => {
                failed += 1;
                println!("FAIL criterion {name}: {why} [{:.1?}]", start.elapsed());
            }
        }
    }
    println!("{} of 10 criteria passed", 10 - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
