//! Confidence intervals for linear functionals `f·p`.
//!
//! Region-induced intervals are the range of `f·p` over a confidence region,
//! extracted by scanning candidate points. The grid scan is an outer
//! approximation: the extreme member values are widened by the largest change
//! of `f·p` between neighbouring grid points. Closed-form mean bounds
//! (Hoeffding, sub-Gaussian with known variance, empirical Bernstein and
//! KL-Bernoulli) are provided for comparison.

use std::f64::consts::PI;
use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{check_delta, check_dims, Error, Result};
use crate::regions::{ConfidenceRegion, Construction, RegionSpec};
use crate::simplex::{
    kl_bernoulli_unchecked, sample_dirichlet, Compositions, EmpiricalDistribution, SimplexPoint,
};

/// Values `v_i` attached to the categories; `f(p) = Σ v_i p_i`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LinearFunctional {
    values: Vec<f64>,
}

impl LinearFunctional {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::InvalidArgument(
                "functional needs at least one value".into(),
            ));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument(
                "functional values must be finite".into(),
            ));
        }
        Ok(Self { values })
    }

    /// The mean functional `Σ i p_i` with values `0, 1, ..., k-1`.
    pub fn mean(k: usize) -> Result<Self> {
        Self::new((0..k).map(|i| i as f64).collect())
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn k(&self) -> usize {
        self.values.len()
    }

    pub fn apply(&self, p: &SimplexPoint) -> Result<f64> {
        check_dims(self.k(), p.k())?;
        Ok(self.apply_probs(p.probs()))
    }

    #[inline]
    pub(crate) fn apply_probs(&self, p: &[f64]) -> f64 {
        self.values.iter().zip(p).map(|(v, x)| v * x).sum()
    }

    /// `[min v, max v]`, the range of `f` over `Δ_k`.
    pub fn range(&self) -> (f64, f64) {
        let lo = self.values.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = self
            .values
            .iter()
            .copied()
            .fold(f64::NEG_INFINITY, f64::max);
        (lo, hi)
    }

    /// `max_{i,j} |v_i - v_j|`.
    pub fn spread(&self) -> f64 {
        let (lo, hi) = self.range();
        hi - lo
    }

    /// Empirical mean of the sample summarized by `phat`.
    pub fn empirical_mean(&self, phat: &EmpiricalDistribution) -> Result<f64> {
        check_dims(self.k(), phat.k())?;
        if phat.n() == 0 {
            return Err(Error::TooFewSamples { needed: 1, got: 0 });
        }
        Ok(self.apply_probs(&phat.proportions()))
    }

    /// Variance of `v_X` for `X ~ p`.
    pub fn variance_under(&self, p: &SimplexPoint) -> Result<f64> {
        let m = self.apply(p)?;
        Ok(self
            .values
            .iter()
            .zip(p.probs())
            .map(|(v, x)| x * (v - m) * (v - m))
            .sum())
    }

    /// Unbiased sample variance of the sample summarized by `phat`.
    pub fn sample_variance(&self, phat: &EmpiricalDistribution) -> Result<f64> {
        check_dims(self.k(), phat.k())?;
        let n = phat.n();
        if n < 2 {
            return Err(Error::TooFewSamples {
                needed: 2,
                got: n as usize,
            });
        }
        let m = self.empirical_mean(phat)?;
        let ss: f64 = self
            .values
            .iter()
            .zip(phat.counts())
            .map(|(v, &c)| c as f64 * (v - m) * (v - m))
            .sum();
        Ok(ss / (n - 1) as f64)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum IntervalMethod {
    Region(Construction),
    /// Range of `f·p` over the Pearson χ² acceptance region.
    Chi2Approximate,
    Hoeffding,
    OracleChernoff,
    /// Constants `ln(3/δ)` and `3R/n`.
    EmpiricalBernstein,
    KlBernoulli,
}

impl fmt::Display for IntervalMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Region(c) => write!(f, "{c}"),
            Self::Chi2Approximate => f.write_str("chi2-approximate"),
            Self::Hoeffding => f.write_str("hoeffding"),
            Self::OracleChernoff => f.write_str("oracle-chernoff"),
            Self::EmpiricalBernstein => f.write_str("empirical-bernstein"),
            Self::KlBernoulli => f.write_str("kl-bernoulli"),
        }
    }
}

/// How candidate points of `Δ_k` are generated for region-induced intervals.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "kind")]
pub enum Scan {
    /// Every point of `Δ_{k,M} / M`.
    Grid { resolution: u64 },
    /// Flat Dirichlet proposals plus `phat` itself.
    MonteCarlo { draws: u64, seed: u64 },
    /// Boundary search along rays from `phat` (`k <= 3`). Assumes the region is
    /// star-shaped around `phat`.
    Rays { rays: usize },
}

impl Scan {
    pub const DEFAULT_MC_DRAWS: u64 = 200_000;

    /// `M = max(10n, 150)` grids for `k <= 3`, Monte Carlo beyond.
    pub fn default_for(k: usize, n: u64) -> Scan {
        if k <= 3 {
            Scan::Grid {
                resolution: (10 * n).max(150),
            }
        } else {
            Scan::MonteCarlo {
                draws: Self::DEFAULT_MC_DRAWS,
                seed: 0,
            }
        }
    }
}

impl fmt::Display for Scan {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Scan::Grid { resolution } => write!(f, "grid M={resolution}"),
            Scan::MonteCarlo { draws, seed } => {
                write!(f, "monte carlo ({draws} draws, seed {seed})")
            }
            Scan::Rays { rays } => write!(f, "ray search ({rays} rays)"),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IntervalResult {
    pub lower: f64,
    pub upper: f64,
    pub method: IntervalMethod,
    pub scan: Option<Scan>,
    pub grid_resolution: Option<u64>,
    pub conservative_padding: f64,
    /// Scan points found inside the region, and scanned in total.
    pub points_in_region: Option<u64>,
    pub points_scanned: Option<u64>,
}

impl IntervalResult {
    fn closed_form(lower: f64, upper: f64, method: IntervalMethod) -> Self {
        Self {
            lower,
            upper,
            method,
            scan: None,
            grid_resolution: None,
            conservative_padding: 0.0,
            points_in_region: None,
            points_scanned: None,
        }
    }

    pub fn width(&self) -> f64 {
        self.upper - self.lower
    }

    pub fn contains(&self, x: f64) -> bool {
        self.lower <= x && x <= self.upper
    }
}

/// Range of `f·p` over the region of `phat` selected by `spec`.
pub fn functional_interval(
    phat: &EmpiricalDistribution,
    f: &LinearFunctional,
    spec: &RegionSpec,
    scan: Scan,
) -> Result<IntervalResult> {
    let region = ConfidenceRegion::new(phat, spec)?;
    region_interval(&region, f, scan)
}

/// As [`functional_interval`], for an already constructed region.
pub fn region_interval(
    region: &ConfidenceRegion,
    f: &LinearFunctional,
    scan: Scan,
) -> Result<IntervalResult> {
    let spec = region.spec();
    let k = spec.k();
    check_dims(k, f.k())?;
    let (lo_range, hi_range) = f.range();
    let method = IntervalMethod::Region(spec.construction());

    let mut extremes = Extremes::new();
    let (padding, grid_resolution, scanned) = match scan {
        Scan::Grid { resolution } => {
            if resolution == 0 {
                return Err(Error::ResolutionTooSmall {
                    resolution,
                    minimum: 1,
                });
            }
            let m = resolution as f64;
            let mut probs = vec![0.0; k];
            let mut scanned = 0u64;
            let mut it = Compositions::new(k, resolution);
            while let Some(c) = it.advance() {
                scanned += 1;
                for (x, &ci) in probs.iter_mut().zip(c) {
                    *x = ci as f64 / m;
                }
                if region.contains_probs(&probs) {
                    extremes.push(f.apply_probs(&probs));
                }
            }
            // Neighbouring grid points move 1/M of mass between two categories.
            (f.spread() * (k as f64 - 1.0) / m, Some(resolution), scanned)
        }
        Scan::MonteCarlo { draws, seed } => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let alphas = vec![1.0; k];
            if spec.n() > 0 {
                let center = region.phat().proportions();
                if region.contains_probs(&center) {
                    extremes.push(f.apply_probs(&center));
                }
            }
            for _ in 0..draws {
                let p = sample_dirichlet(&mut rng, &alphas)?;
                if region.contains_probs(p.probs()) {
                    extremes.push(f.apply_probs(p.probs()));
                }
            }
            (0.0, None, draws + 1)
        }
        Scan::Rays { rays } => {
            if spec.n() == 0 {
                return Ok(IntervalResult {
                    scan: Some(scan),
                    ..IntervalResult::closed_form(lo_range, hi_range, method)
                });
            }
            let center = region.phat().proportions();
            let contains = |p: &[f64]| region.contains_probs(p);
            let search = RaySearch::new(rays);
            let upper = ray_support(&center, f.values(), &search, &contains)?;
            let neg: Vec<f64> = f.values().iter().map(|v| -v).collect();
            let lower = -ray_support(&center, &neg, &search, &contains)?;
            extremes.push(lower);
            extremes.push(upper);
            (0.0, None, 0)
        }
    };

    let Some((min, max)) = extremes.get() else {
        return Err(Error::EmptyRegionScan {
            scan: scan.to_string(),
            diagnostics: format!(
                "{} region of {} at δ = {}, {scanned} points scanned",
                spec.construction(),
                region.phat(),
                spec.delta()
            ),
        });
    };
    Ok(IntervalResult {
        lower: (min - padding).max(lo_range),
        upper: (max + padding).min(hi_range),
        method,
        scan: Some(scan),
        grid_resolution,
        conservative_padding: padding,
        points_in_region: Some(extremes.count),
        points_scanned: Some(scanned),
    })
}

struct Extremes {
    min: f64,
    max: f64,
    count: u64,
}

impl Extremes {
    fn new() -> Self {
        Self {
            min: f64::INFINITY,
            max: f64::NEG_INFINITY,
            count: 0,
        }
    }

    fn push(&mut self, x: f64) {
        self.min = self.min.min(x);
        self.max = self.max.max(x);
        self.count += 1;
    }

    fn get(&self) -> Option<(f64, f64)> {
        (self.count > 0).then_some((self.min, self.max))
    }
}

/// Effort settings for [`ray_support`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RaySearch {
    pub rays: usize,
    pub bisection_steps: usize,
    /// Best coarse rays refined by golden-section search.
    pub refine_candidates: usize,
    pub refine_steps: usize,
}

impl RaySearch {
    pub fn new(rays: usize) -> Self {
        Self {
            rays,
            bisection_steps: 40,
            refine_candidates: 4,
            refine_steps: 16,
        }
    }
}

/// Largest `values·p` over the boundary of a region that is star-shaped
/// around `center`, found by bisection along rays.
///
/// Rays span the half-plane where `values·p` increases; the best ray is then
/// refined by golden-section search over the angle. The reported point is
/// the first non-member along each ray, so the estimate errs outward.
pub fn ray_support(
    center: &[f64],
    values: &[f64],
    search: &RaySearch,
    contains: &dyn Fn(&[f64]) -> bool,
) -> Result<f64> {
    let rays = search.rays;
    let k = center.len();
    check_dims(k, values.len())?;
    if !(2..=3).contains(&k) {
        return Err(Error::Unsupported(format!(
            "ray search needs k = 2 or 3, got k = {k}"
        )));
    }
    if !contains(center) {
        return Err(Error::EmptyRegionScan {
            scan: format!("ray search ({rays} rays)"),
            diagnostics: "the ray origin is outside the region".into(),
        });
    }
    let base: f64 = values.iter().zip(center).map(|(v, x)| v * x).sum();
    let mean_v = values.iter().sum::<f64>() / k as f64;
    let g: Vec<f64> = values.iter().map(|v| v - mean_v).collect();
    if g.iter().all(|x| x.abs() < 1e-15) {
        return Ok(base);
    }

    let mut buf = vec![0.0; k];
    let mut reach = |d: &[f64]| -> f64 {
        let slope: f64 = values.iter().zip(d).map(|(v, x)| v * x).sum();
        let t = boundary_along(center, d, contains, search.bisection_steps, &mut buf);
        base + t * slope
    };

    if k == 2 {
        let s = if g[0] > 0.0 { 1.0 } else { -1.0 };
        let d = [s / 2f64.sqrt(), -s / 2f64.sqrt()];
        return Ok(reach(&d).max(base));
    }

    let e1 = [1.0 / 2f64.sqrt(), -1.0 / 2f64.sqrt(), 0.0];
    let e2 = [1.0 / 6f64.sqrt(), 1.0 / 6f64.sqrt(), -2.0 / 6f64.sqrt()];
    let dot = |a: &[f64], b: &[f64; 3]| a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>();
    let theta_star = dot(&g, &e2).atan2(dot(&g, &e1));
    let dir = |theta: f64| -> [f64; 3] {
        let (s, c) = theta.sin_cos();
        [
            c * e1[0] + s * e2[0],
            c * e1[1] + s * e2[1],
            c * e1[2] + s * e2[2],
        ]
    };

    let rays = rays.max(1);
    let mut best = reach(&dir(theta_star)).max(base);
    let mut coarse: Vec<(f64, f64)> = (0..rays)
        .map(|i| {
            let theta = theta_star - PI / 2.0 + PI * (i as f64 + 0.5) / rays as f64;
            (reach(&dir(theta)), theta)
        })
        .collect();
    coarse.sort_by(|a, b| b.0.total_cmp(&a.0));

    // The boundary is only piecewise smooth, so refine around several rays.
    let half = PI / rays as f64;
    let phi = (5f64.sqrt() - 1.0) / 2.0;
    for &(value, centre) in coarse.iter().take(search.refine_candidates) {
        best = best.max(value);
        let (mut a, mut b) = (centre - half, centre + half);
        let mut x1 = b - phi * (b - a);
        let mut x2 = a + phi * (b - a);
        let mut f1 = reach(&dir(x1));
        let mut f2 = reach(&dir(x2));
        for _ in 0..search.refine_steps {
            best = best.max(f1).max(f2);
            if f1 < f2 {
                a = x1;
                x1 = x2;
                f1 = f2;
                x2 = a + phi * (b - a);
                f2 = reach(&dir(x2));
            } else {
                b = x2;
                x2 = x1;
                f2 = f1;
                x1 = b - phi * (b - a);
                f1 = reach(&dir(x1));
            }
        }
        best = best.max(f1).max(f2);
    }
    Ok(best)
}

/// Distance from `center` along unit direction `d` to the region boundary
/// (or to the simplex boundary when the region reaches it).
fn boundary_along(
    center: &[f64],
    d: &[f64],
    contains: &dyn Fn(&[f64]) -> bool,
    steps: usize,
    buf: &mut [f64],
) -> f64 {
    let t_max = center
        .iter()
        .zip(d)
        .filter(|(_, &di)| di < 0.0)
        .map(|(&ci, &di)| ci / -di)
        .fold(f64::INFINITY, f64::min);
    if !(t_max > 0.0) || !t_max.is_finite() {
        return 0.0;
    }
    let at = |t: f64, buf: &mut [f64]| {
        for ((b, &c), &di) in buf.iter_mut().zip(center).zip(d) {
            *b = (c + t * di).max(0.0);
        }
        contains(buf)
    };
    if at(t_max, buf) {
        return t_max;
    }
    let (mut lo, mut hi) = (0.0, t_max);
    for _ in 0..steps {
        let mid = 0.5 * (lo + hi);
        if at(mid, buf) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    hi
}

fn check_range(range: (f64, f64)) -> Result<()> {
    if range.0.is_finite() && range.1.is_finite() && range.0 <= range.1 {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!(
            "invalid range [{}, {}]",
            range.0, range.1
        )))
    }
}

fn clamped(center: f64, radius: f64, range: (f64, f64), method: IntervalMethod) -> IntervalResult {
    IntervalResult::closed_form(
        (center - radius).max(range.0),
        (center + radius).min(range.1),
        method,
    )
}

/// `mean_hat ± (b - a) sqrt(ln(2/δ) / 2n)`.
pub fn hoeffding_interval(
    mean_hat: f64,
    n: u64,
    delta: f64,
    range: (f64, f64),
) -> Result<IntervalResult> {
    check_delta(delta)?;
    check_range(range)?;
    if n == 0 {
        return Err(Error::TooFewSamples { needed: 1, got: 0 });
    }
    let radius = (range.1 - range.0) * ((2.0 / delta).ln() / (2.0 * n as f64)).sqrt();
    Ok(clamped(mean_hat, radius, range, IntervalMethod::Hoeffding))
}

/// Sub-Gaussian interval with the true variance as variance proxy:
/// `mean_hat ± sqrt(2 σ² ln(2/δ) / n)`.
pub fn oracle_chernoff_interval(
    mean_hat: f64,
    variance_true: f64,
    n: u64,
    delta: f64,
    range: (f64, f64),
) -> Result<IntervalResult> {
    check_delta(delta)?;
    check_range(range)?;
    if !(variance_true >= 0.0) {
        return Err(Error::InvalidArgument(format!(
            "variance {variance_true} is negative"
        )));
    }
    if n == 0 {
        return Err(Error::TooFewSamples { needed: 1, got: 0 });
    }
    let radius = (2.0 * variance_true * (2.0 / delta).ln() / n as f64).sqrt();
    Ok(clamped(
        mean_hat,
        radius,
        range,
        IntervalMethod::OracleChernoff,
    ))
}

/// Empirical Bernstein interval from a sample with values in `range`:
/// `mean ± [sqrt(2 V ln(3/δ) / n) + 3 (b - a) ln(3/δ) / n]`, `V` the unbiased
/// sample variance.
pub fn empirical_bernstein_interval(
    samples: &[f64],
    delta: f64,
    range: (f64, f64),
) -> Result<IntervalResult> {
    check_range(range)?;
    let n = samples.len();
    if n < 2 {
        return Err(Error::TooFewSamples { needed: 2, got: n });
    }
    if let Some(x) = samples.iter().find(|x| !(range.0..=range.1).contains(*x)) {
        return Err(Error::InvalidArgument(format!(
            "sample {x} outside [{}, {}]",
            range.0, range.1
        )));
    }
    let mean = samples.iter().sum::<f64>() / n as f64;
    let var = samples.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1) as f64;
    empirical_bernstein_from_moments(mean, var, n as u64, delta, range)
}

/// [`empirical_bernstein_interval`] from the sample mean and unbiased variance.
pub fn empirical_bernstein_from_moments(
    mean: f64,
    variance: f64,
    n: u64,
    delta: f64,
    range: (f64, f64),
) -> Result<IntervalResult> {
    check_delta(delta)?;
    check_range(range)?;
    if n < 2 {
        return Err(Error::TooFewSamples {
            needed: 2,
            got: n as usize,
        });
    }
    let n_f = n as f64;
    let log_term = (3.0 / delta).ln();
    let radius = (2.0 * variance.max(0.0) * log_term / n_f).sqrt()
        + 3.0 * (range.1 - range.0) * log_term / n_f;
    Ok(clamped(
        mean,
        radius,
        range,
        IntervalMethod::EmpiricalBernstein,
    ))
}

/// `{m : KL_Bernoulli(mean_hat, m) <= ln(2/δ) / n}`, endpoints by bisection.
pub fn kl_bernoulli_interval(mean_hat: f64, n: u64, delta: f64) -> Result<IntervalResult> {
    check_delta(delta)?;
    if !(0.0..=1.0).contains(&mean_hat) {
        return Err(Error::OutOfUnitInterval {
            name: "mean_hat",
            value: mean_hat,
        });
    }
    if n == 0 {
        return Err(Error::TooFewSamples { needed: 1, got: 0 });
    }
    let threshold = (2.0 / delta).ln() / n as f64;
    let upper = kl_inverse(mean_hat, threshold, 1.0);
    let lower = kl_inverse(mean_hat, threshold, 0.0);
    Ok(IntervalResult::closed_form(
        lower,
        upper,
        IntervalMethod::KlBernoulli,
    ))
}

/// Point between `mean_hat` and `toward` where the Bernoulli KL reaches
/// `threshold`, or `toward` itself when it never does.
fn kl_inverse(mean_hat: f64, threshold: f64, toward: f64) -> f64 {
    if kl_bernoulli_unchecked(mean_hat, toward) <= threshold {
        return toward;
    }
    let (mut inside, mut outside) = (mean_hat, toward);
    for _ in 0..200 {
        let mid = 0.5 * (inside + outside);
        if mid == inside || mid == outside {
            break;
        }
        if kl_bernoulli_unchecked(mean_hat, mid) <= threshold {
            inside = mid;
        } else {
            outside = mid;
        }
    }
    inside
}

/// Point of `Δ_3` for `u ∈ [-1, 1]` under the mixture measure whose mean
/// functional `p_1 + 2 p_2` is uniform on `[0, 2]`.
pub fn induced_measure_point(u: f64) -> Result<SimplexPoint> {
    if !(-1.0..=1.0).contains(&u) {
        return Err(Error::InvalidArgument(format!("u = {u} outside [-1, 1]")));
    }
    let (p0, p2) = if u >= 0.0 { (u, 0.0) } else { (0.0, -u) };
    Ok(SimplexPoint::from_raw(vec![p0, 1.0 - p0 - p2, p2]))
}

/// Seeded sampler for [`induced_measure_point`] with `u ~ uniform[-1, 1]`.
#[derive(Debug, Clone)]
pub struct InducedMeasureSampler {
    rng: ChaCha8Rng,
}

impl InducedMeasureSampler {
    pub fn new(seed: u64) -> Self {
        Self {
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    pub fn sample(&mut self) -> SimplexPoint {
        let u: f64 = self.rng.random_range(-1.0..=1.0);
        induced_measure_point(u).expect("u drawn from [-1, 1]")
    }
}
