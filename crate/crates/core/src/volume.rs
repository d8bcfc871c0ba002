//! Region volumes as fractions of the simplex.
//!
//! Volumes are estimated on the interior points `(c + 1/k) / (M + 1)` for
//! `c ∈ Δ_{k,M}`: the centroids of the upward cells of the subdivision of
//! `Δ_k` at resolution `M + 1`. No coordinate of a volume grid point is zero.
//!
//! The total volume over all observations can be counted two ways: per
//! observation ([`average_volume`]) or per parameter, as the size of the
//! covering collection ([`covering_size_integral`]). On a common grid the two
//! agree point by point.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{check_delta, Error, Result};
use crate::numeric::KahanSum;
use crate::regions::{covering_collection, ConfidenceRegion, Construction, RegionSpec};
use crate::simplex::{
    enumerate_simplex, sample_dirichlet, sample_multinomial, simplex_size, Compositions,
    EmpiricalDistribution, SimplexPoint,
};

pub const MIN_RESOLUTION: u64 = 50;

fn check_resolution(resolution: u64) -> Result<()> {
    if resolution < MIN_RESOLUTION {
        return Err(Error::ResolutionTooSmall {
            resolution,
            minimum: MIN_RESOLUTION,
        });
    }
    Ok(())
}

/// Calls `visit` with every volume grid point, reusing one buffer.
pub fn for_each_volume_point(k: usize, resolution: u64, mut visit: impl FnMut(&[f64])) {
    let m = resolution as f64 + 1.0;
    let shift = 1.0 / k as f64;
    let mut probs = vec![0.0; k];
    let mut it = Compositions::new(k, resolution);
    while let Some(c) = it.advance() {
        for (x, &ci) in probs.iter_mut().zip(c) {
            *x = (ci as f64 + shift) / m;
        }
        visit(&probs);
    }
}

/// Fraction of grid points inside the region.
pub fn region_volume(
    phat: &EmpiricalDistribution,
    spec: &RegionSpec,
    resolution: u64,
) -> Result<f64> {
    check_resolution(resolution)?;
    let region = ConfidenceRegion::new(phat, spec)?;
    Ok(grid_fraction(&region, resolution))
}

fn grid_fraction(region: &ConfidenceRegion, resolution: u64) -> f64 {
    let (mut inside, mut total) = (0u64, 0u64);
    for_each_volume_point(region.spec().k(), resolution, |p| {
        total += 1;
        if region.contains_probs(p) {
            inside += 1;
        }
    });
    inside as f64 / total as f64
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PhatVolume {
    pub phat: EmpiricalDistribution,
    pub volume: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VolumeReport {
    pub construction: Construction,
    pub k: usize,
    pub n: u64,
    pub delta: f64,
    pub grid_resolution: u64,
    /// In ascending lexicographic order of `phat`.
    pub per_phat: Vec<PhatVolume>,
    pub total: f64,
    pub mc_draws: Option<u64>,
    pub seed: Option<u64>,
}

impl VolumeReport {
    pub fn volume_of(&self, phat: &EmpiricalDistribution) -> Option<f64> {
        self.per_phat
            .iter()
            .find(|e| &e.phat == phat)
            .map(|e| e.volume)
    }

    /// Grid error allowance `3/M` per region, summed over `Δ_{k,n}`.
    pub fn grid_tolerance(&self) -> f64 {
        3.0 / self.grid_resolution as f64 * self.per_phat.len() as f64
    }
}

/// Sum of region volumes over every `phat ∈ Δ_{k,n}`.
pub fn average_volume(spec: &RegionSpec, resolution: u64) -> Result<VolumeReport> {
    check_resolution(resolution)?;
    let mut per_phat = Vec::new();
    let mut total = KahanSum::new();
    for phat in enumerate_simplex(spec.k(), spec.n())? {
        let region = ConfidenceRegion::new(&phat, spec)?;
        let volume = grid_fraction(&region, resolution);
        total.add(volume);
        per_phat.push(PhatVolume { phat, volume });
    }
    Ok(VolumeReport {
        construction: spec.construction(),
        k: spec.k(),
        n: spec.n(),
        delta: spec.delta(),
        grid_resolution: resolution,
        per_phat,
        total: total.value(),
        mc_draws: None,
        seed: None,
    })
}

/// Grid average of `|S**(p)|`, computed from the sorted covering collections.
pub fn covering_size_integral(n: u64, k: usize, delta: f64, resolution: u64) -> Result<f64> {
    check_resolution(resolution)?;
    check_delta(delta)?;
    simplex_size(k, n)?;
    let mut sum = KahanSum::new();
    let mut count = 0u64;
    let mut failure = None;
    for_each_volume_point(k, resolution, |p| {
        if failure.is_some() {
            return;
        }
        match covering_collection(&SimplexPoint::from_raw(p.to_vec()), n, delta) {
            Ok(s) => {
                sum.add(s.len() as f64);
                count += 1;
            }
            Err(e) => failure = Some(e),
        }
    });
    match failure {
        Some(e) => Err(e),
        None => Ok(sum.value() / count as f64),
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PairedDifference {
    pub baseline: Construction,
    /// Mean of `volume(baseline) - volume(level-set)` over the draws.
    pub mean_difference: f64,
    pub standard_error: f64,
}

impl PairedDifference {
    /// Whether the level-set region is smaller by more than `z` standard errors.
    pub fn dominates(&self, z: f64) -> bool {
        self.mean_difference > z * self.standard_error
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct UniformPriorComparison {
    pub k: usize,
    pub n: u64,
    pub delta: f64,
    pub grid_resolution: u64,
    pub mc_draws: u64,
    pub seed: u64,
    pub mean_volume: Vec<(Construction, f64)>,
    pub paired: Vec<PairedDifference>,
}

/// Monte Carlo expected region volume under `p ~ Dirichlet(1, ..., 1)`,
/// `phat ~ Multinomial(n, p)`, with paired comparisons against the baselines.
pub fn uniform_prior_comparison(
    k: usize,
    n: u64,
    delta: f64,
    resolution: u64,
    draws: u64,
    seed: u64,
) -> Result<UniformPriorComparison> {
    if draws < 2 {
        return Err(Error::InvalidArgument("need at least two draws".into()));
    }
    let reports = Construction::ALL
        .iter()
        .map(|&c| average_volume(&RegionSpec::new(c, k, n, delta)?, resolution))
        .collect::<Result<Vec<_>>>()?;
    let index_of = |phat: &EmpiricalDistribution| {
        reports[0]
            .per_phat
            .binary_search_by(|e| e.phat.cmp(phat))
            .expect("phat in Δ_{k,n}")
    };

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let alphas = vec![1.0; k];
    let mut sums = vec![KahanSum::new(); reports.len()];
    let mut diffs: Vec<Vec<f64>> = vec![Vec::with_capacity(draws as usize); reports.len() - 1];
    for _ in 0..draws {
        let p = sample_dirichlet(&mut rng, &alphas)?;
        let i = index_of(&sample_multinomial(&mut rng, &p, n));
        let level = reports[0].per_phat[i].volume;
        sums[0].add(level);
        for (j, report) in reports.iter().enumerate().skip(1) {
            let v = report.per_phat[i].volume;
            sums[j].add(v);
            diffs[j - 1].push(v - level);
        }
    }

    let d = draws as f64;
    let paired = diffs
        .iter()
        .zip(&reports[1..])
        .map(|(xs, report)| {
            let mean = xs.iter().sum::<f64>() / d;
            let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (d - 1.0);
            PairedDifference {
                baseline: report.construction,
                mean_difference: mean,
                standard_error: (var / d).sqrt(),
            }
        })
        .collect();
    Ok(UniformPriorComparison {
        k,
        n,
        delta,
        grid_resolution: resolution,
        mc_draws: draws,
        seed,
        mean_volume: reports
            .iter()
            .zip(&sums)
            .map(|(r, s)| (r.construction, s.value() / d))
            .collect(),
        paired,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ed(c: &[u64]) -> EmpiricalDistribution {
        EmpiricalDistribution::new(c.to_vec()).unwrap()
    }

    fn spec(c: Construction, k: usize, n: u64, delta: f64) -> RegionSpec {
        RegionSpec::new(c, k, n, delta).unwrap()
    }

    #[test]
    fn small_resolution_rejected() {
        let s = spec(Construction::LevelSet, 2, 4, 0.3);
        assert!(matches!(
            region_volume(&ed(&[2, 2]), &s, 10),
            Err(Error::ResolutionTooSmall { .. })
        ));
        assert!(average_volume(&s, 49).is_err());
    }

    #[test]
    fn tiny_delta_covers_the_simplex() {
        for c in Construction::ALL {
            let v = region_volume(&ed(&[1, 3]), &spec(c, 2, 4, 1e-9), 100).unwrap();
            assert_eq!(v, 1.0, "{c}");
        }
    }

    #[test]
    fn level_set_smaller_than_baselines_at_fig2_setting() {
        let phat = ed(&[6, 6, 3]);
        let level = region_volume(&phat, &spec(Construction::LevelSet, 3, 15, 0.7), 200).unwrap();
        let sanov = region_volume(&phat, &spec(Construction::Sanov, 3, 15, 0.7), 200).unwrap();
        let poly = region_volume(&phat, &spec(Construction::Polytope, 3, 15, 0.7), 200).unwrap();
        assert!(level < sanov && level < poly, "{level} {sanov} {poly}");
    }

    /// Interval length of a region on `Δ_2` by bisecting outward from `phat`
    /// in both directions.
    fn interval_length(region: &ConfidenceRegion, center: f64) -> f64 {
        let inside = |x: f64| region.contains_probs(&[x, 1.0 - x]);
        assert!(inside(center));
        let edge = |toward: f64| {
            if inside(toward) {
                return toward;
            }
            let (mut a, mut b) = (center, toward);
            for _ in 0..60 {
                let mid = 0.5 * (a + b);
                if inside(mid) {
                    a = mid;
                } else {
                    b = mid;
                }
            }
            a
        };
        edge(1.0) - edge(0.0)
    }

    #[test]
    fn k2_volume_matches_bisection_oracle() {
        let m = 2000;
        for c in Construction::ALL {
            for (counts, delta) in [([1u64, 3], 0.3), ([3, 3], 0.1), ([0, 6], 0.3)] {
                let phat = ed(&counts);
                let s = spec(c, 2, phat.n(), delta);
                let region = ConfidenceRegion::new(&phat, &s).unwrap();
                let oracle = interval_length(&region, phat.proportions()[0]);
                let grid = region_volume(&phat, &s, m).unwrap();
                assert!(
                    (grid - oracle).abs() <= 2.0 / m as f64,
                    "{c} {phat}: {grid} vs {oracle}"
                );
            }
        }
    }

    #[test]
    fn empty_sample_total_is_one() {
        for c in Construction::ALL {
            let r = average_volume(&spec(c, 3, 0, 0.3), 60).unwrap();
            assert_eq!(r.per_phat.len(), 1);
            assert_eq!(r.total, 1.0);
        }
    }

    #[test]
    fn both_way_counting_agrees() {
        let m = 80;
        let report = average_volume(&spec(Construction::LevelSet, 3, 5, 0.7), m).unwrap();
        let integral = covering_size_integral(5, 3, 0.7, m).unwrap();
        assert!(
            (report.total - integral).abs() <= 3.0 / m as f64,
            "{} vs {integral}",
            report.total
        );
        assert!(report
            .per_phat
            .iter()
            .all(|e| (0.0..=1.0).contains(&e.volume)));
        assert!(report.per_phat.windows(2).all(|w| w[0].phat < w[1].phat));
    }

    #[test]
    fn tiny_delta_covering_integral_is_simplex_size() {
        let v = covering_size_integral(4, 2, 1e-12, 50).unwrap();
        assert_eq!(v, 5.0);
    }

    #[test]
    fn level_set_total_is_smallest_for_k2() {
        let totals: Vec<f64> = Construction::ALL
            .iter()
            .map(|&c| average_volume(&spec(c, 2, 4, 0.3), 300).unwrap().total)
            .collect();
        assert!(
            totals[0] <= totals[1] && totals[0] <= totals[2],
            "{totals:?}"
        );
    }

    #[test]
    fn uniform_prior_matches_average_over_outcomes() {
        // Under a flat prior every outcome in Δ_{k,n} is equally likely.
        let cmp = uniform_prior_comparison(3, 4, 0.5, 50, 4000, 3).unwrap();
        let report = average_volume(&spec(Construction::LevelSet, 3, 4, 0.5), 50).unwrap();
        let exact = report.total / report.per_phat.len() as f64;
        assert!(
            (cmp.mean_volume[0].1 - exact).abs() < 0.02,
            "{:?} vs {exact}",
            cmp.mean_volume
        );
        let again = uniform_prior_comparison(3, 4, 0.5, 50, 4000, 3).unwrap();
        assert_eq!(cmp, again);
    }
}
