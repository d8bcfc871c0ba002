//! Confidence regions for the multinomial parameter.
//!
//! The level-set region `C**_δ(phat)` is the set of `p` whose covering
//! collection `S**(p)` contains `phat`, where `S**(p)` is the shortest prefix of
//! `Δ_{k,n}` ordered by descending `P_p` whose mass reaches `1 - δ`. Equal
//! probabilities are ordered lexicographically on the count vectors.
//!
//! Two KL-based baselines (Sanov and the KL-Bernoulli polytope), exact
//! p-values, the KL outer bound and the Pearson χ² prefilter live here too.

mod rank;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use statrs::distribution::{ChiSquared, ContinuousCDF};

use crate::error::{check_delta, check_dims, Error, Result};
use crate::numeric::KahanSum;
use crate::simplex::{
    kl_bernoulli_unchecked, kl_slices, Compositions, EmpiricalDistribution, MultinomialLogPmf,
    SimplexPoint,
};

pub use rank::{rank_mass_exhaustive, LevelSetRegion};

/// Two outcomes are equiprobable when their log-probabilities differ by at
/// most this much.
pub const TIE_LOG_TOLERANCE: f64 = 1e-9;

#[inline]
pub fn equiprobable(a: f64, b: f64) -> bool {
    a == b || (a - b).abs() <= TIE_LOG_TOLERANCE
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Construction {
    /// Minimal average volume region built from `S**(p)`.
    LevelSet,
    /// `KL(phat, p)` below a Sanov-type threshold.
    Sanov,
    /// Per-coordinate KL-Bernoulli bounds with `δ/k` error each.
    Polytope,
}

impl Construction {
    pub const ALL: [Construction; 3] = [Self::LevelSet, Self::Sanov, Self::Polytope];

    pub fn name(&self) -> &'static str {
        match self {
            Self::LevelSet => "levelset",
            Self::Sanov => "sanov",
            Self::Polytope => "polytope",
        }
    }
}

impl fmt::Display for Construction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Construction {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "levelset" | "level-set" => Ok(Self::LevelSet),
            "sanov" => Ok(Self::Sanov),
            "polytope" => Ok(Self::Polytope),
            other => Err(Error::InvalidArgument(format!(
                "unknown construction {other:?} (expected levelset, sanov or polytope)"
            ))),
        }
    }
}

/// Which concentration threshold the Sanov region uses.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SanovBound {
    /// `(k-1) ln(2(k-1)/δ) / n`, valid when `k <= e (n / 8π)^{1/3}`.
    #[default]
    Refined,
    /// `ln((n+1)^k / δ) / n`, valid for all `k, n`.
    Generic,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RegionSpec {
    delta: f64,
    construction: Construction,
    n: u64,
    k: usize,
    sanov_bound: SanovBound,
}

impl RegionSpec {
    pub fn new(construction: Construction, k: usize, n: u64, delta: f64) -> Result<Self> {
        check_delta(delta)?;
        if k == 0 {
            return Err(Error::InvalidArgument("k must be at least 1".into()));
        }
        Ok(Self {
            delta,
            construction,
            n,
            k,
            sanov_bound: SanovBound::default(),
        })
    }

    pub fn with_sanov_bound(mut self, bound: SanovBound) -> Self {
        self.sanov_bound = bound;
        self
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    pub fn construction(&self) -> Construction {
        self.construction
    }

    pub fn n(&self) -> u64 {
        self.n
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn sanov_bound(&self) -> SanovBound {
        self.sanov_bound
    }

    pub fn with_delta(mut self, delta: f64) -> Result<Self> {
        check_delta(delta)?;
        self.delta = delta;
        Ok(self)
    }

    fn check_phat(&self, phat: &EmpiricalDistribution) -> Result<()> {
        check_dims(self.k, phat.k())?;
        if phat.n() != self.n {
            return Err(Error::SampleCountMismatch {
                expected: self.n,
                actual: phat.n(),
            });
        }
        Ok(())
    }
}

/// Shortcuts applied before the exact level-set test.
///
/// The outer bound only ever rejects points that are provably outside the
/// region. The χ² prefilter is approximate: it accepts a point without the
/// exact test when the Pearson p-value exceeds `min(1, 10δ)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Acceleration {
    pub outer_bound: bool,
    pub chi2_prefilter: bool,
}

impl Default for Acceleration {
    fn default() -> Self {
        Self {
            outer_bound: true,
            chi2_prefilter: false,
        }
    }
}

impl Acceleration {
    pub const NONE: Acceleration = Acceleration {
        outer_bound: false,
        chi2_prefilter: false,
    };
}

/// `S**(p)`: the probability-ordered prefix of `Δ_{k,n}` with mass `>= 1 - δ`.
#[derive(Clone, Debug, Serialize)]
pub struct CoveringCollection {
    members: Vec<EmpiricalDistribution>,
    probabilities: Vec<f64>,
    cumulative: Vec<f64>,
    total_mass: f64,
    p: SimplexPoint,
    delta: f64,
}

impl CoveringCollection {
    pub fn members(&self) -> &[EmpiricalDistribution] {
        &self.members
    }

    pub fn probabilities(&self) -> &[f64] {
        &self.probabilities
    }

    pub fn cumulative(&self) -> &[f64] {
        &self.cumulative
    }

    pub fn total_mass(&self) -> f64 {
        self.total_mass
    }

    pub fn p(&self) -> &SimplexPoint {
        &self.p
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn contains(&self, phat: &EmpiricalDistribution) -> bool {
        self.members.contains(phat)
    }
}

/// All of `Δ_{k,n}` sorted by descending probability under `p`, with
/// equiprobable runs ordered lexicographically.
pub fn probability_ordering(p: &SimplexPoint, n: u64) -> Vec<(Vec<u64>, f64)> {
    let model = MultinomialLogPmf::new(p, n);
    let mut all = Vec::new();
    let mut it = Compositions::new(p.k(), n);
    while let Some(c) = it.advance() {
        all.push((c.to_vec(), model.eval(c)));
    }
    all.sort_by(|a, b| b.1.total_cmp(&a.1));
    // Tie classes are anchored at their most probable member.
    let mut start = 0;
    while start < all.len() {
        let head = all[start].1;
        let mut end = start + 1;
        while end < all.len() && equiprobable(all[end].1, head) {
            end += 1;
        }
        all[start..end].sort_by(|a, b| a.0.cmp(&b.0));
        start = end;
    }
    all
}

pub fn covering_collection(p: &SimplexPoint, n: u64, delta: f64) -> Result<CoveringCollection> {
    check_delta(delta)?;
    let target = 1.0 - delta;
    let mut members = Vec::new();
    let mut probabilities = Vec::new();
    let mut cumulative = Vec::new();
    let mut acc = KahanSum::new();
    for (counts, lp) in probability_ordering(p, n) {
        let prob = lp.exp();
        acc.add(prob);
        members.push(EmpiricalDistribution::new(counts)?);
        probabilities.push(prob);
        cumulative.push(acc.value());
        if acc.value() >= target {
            break;
        }
    }
    Ok(CoveringCollection {
        members,
        probabilities,
        cumulative,
        total_mass: acc.value(),
        p: p.clone(),
        delta,
    })
}

/// `phat ∈ S**(p)`, decided from the rank mass of `phat` without sorting.
pub fn member_of_covering(
    phat: &EmpiricalDistribution,
    p: &SimplexPoint,
    delta: f64,
) -> Result<bool> {
    LevelSetRegion::new(phat.clone(), delta)?.contains(p)
}

/// Exact p-value: mass of all outcomes no more probable than `phat`.
pub fn p_value(phat: &EmpiricalDistribution, p: &SimplexPoint) -> Result<f64> {
    check_dims(phat.k(), p.k())?;
    let model = MultinomialLogPmf::new(p, phat.n());
    let q = model.eval(phat.counts());
    let mut acc = KahanSum::new();
    let mut it = Compositions::new(phat.k(), phat.n());
    while let Some(c) = it.advance() {
        let v = model.eval(c);
        if v < q || equiprobable(v, q) {
            acc.add(v.exp());
        }
    }
    Ok(acc.value().min(1.0))
}

/// The level-set region of the earlier literature: `p-value(phat; p) > δ`.
///
/// Differs from [`member_of_covering`] only when `1 - δ` splits the tie class
/// of `phat`, which that construction includes or excludes as a whole.
pub fn level_set_membership_via_pvalue(
    p: &SimplexPoint,
    phat: &EmpiricalDistribution,
    delta: f64,
) -> Result<bool> {
    check_delta(delta)?;
    Ok(p_value(phat, p)? > delta)
}

/// Sound rejection: `true` only if `(n+1)^{2k} exp(-n KL(phat, p)) <= δ`,
/// which bounds the p-value of `phat` and so puts `p` outside the region.
pub fn outer_bound_reject(
    phat: &EmpiricalDistribution,
    p: &SimplexPoint,
    delta: f64,
) -> Result<bool> {
    check_dims(phat.k(), p.k())?;
    check_delta(delta)?;
    if phat.n() == 0 {
        return Ok(false);
    }
    Ok(outer_bound_rejects(
        &phat.proportions(),
        p.probs(),
        phat.n(),
        delta,
    ))
}

#[inline]
fn outer_bound_rejects(phat: &[f64], p: &[f64], n: u64, delta: f64) -> bool {
    let n = n as f64;
    let kl = kl_slices(phat, p);
    2.0 * phat.len() as f64 * (n + 1.0).ln() - n * kl <= delta.ln()
}

/// Pearson statistic `Σ (n_i - n p_i)^2 / (n p_i)`.
pub fn pearson_statistic(phat: &EmpiricalDistribution, p: &SimplexPoint) -> Result<f64> {
    check_dims(phat.k(), p.k())?;
    if p.probs().iter().any(|&x| x <= 0.0) {
        return Err(Error::PrefilterUnavailable);
    }
    Ok(pearson_unchecked(phat.counts(), p.probs(), phat.n()))
}

#[inline]
fn pearson_unchecked(counts: &[u64], p: &[f64], n: u64) -> f64 {
    let n = n as f64;
    counts
        .iter()
        .zip(p)
        .map(|(&c, &pi)| {
            let expected = n * pi;
            let d = c as f64 - expected;
            d * d / expected
        })
        .sum()
}

/// Approximate p-value from the χ² distribution with `k - 1` degrees of
/// freedom. Advisory only.
pub fn chi2_prefilter(phat: &EmpiricalDistribution, p: &SimplexPoint) -> Result<f64> {
    let stat = pearson_statistic(phat, p)?;
    if phat.k() < 2 || phat.n() == 0 {
        return Ok(1.0);
    }
    Ok(chi2_survival(phat.k() - 1, stat))
}

pub(crate) fn chi2_survival(dof: usize, stat: f64) -> f64 {
    if stat <= 0.0 {
        return 1.0;
    }
    ChiSquared::new(dof as f64)
        .expect("positive degrees of freedom")
        .sf(stat)
}

/// Upper `δ` quantile of χ² with `dof` degrees of freedom.
pub(crate) fn chi2_critical(dof: usize, delta: f64) -> f64 {
    if dof == 2 {
        return -2.0 * delta.ln();
    }
    ChiSquared::new(dof as f64)
        .expect("positive degrees of freedom")
        .inverse_cdf(1.0 - delta)
}

/// `{p : Pearson(phat, p) <= χ²_{k-1} upper δ quantile}`, the region obtained
/// by inverting the approximate χ² test.
#[derive(Debug, Clone)]
pub struct Chi2Region {
    phat: EmpiricalDistribution,
    critical: f64,
}

impl Chi2Region {
    pub fn new(phat: &EmpiricalDistribution, delta: f64) -> Result<Self> {
        check_delta(delta)?;
        if phat.k() < 2 {
            return Err(Error::Unsupported("χ² region needs k >= 2".into()));
        }
        Ok(Self {
            phat: phat.clone(),
            critical: chi2_critical(phat.k() - 1, delta),
        })
    }

    pub fn critical(&self) -> f64 {
        self.critical
    }

    pub fn contains(&self, p: &SimplexPoint) -> Result<bool> {
        check_dims(self.phat.k(), p.k())?;
        Ok(self.contains_probs(p.probs()))
    }

    pub(crate) fn contains_probs(&self, p: &[f64]) -> bool {
        if self.phat.n() == 0 {
            return true;
        }
        let n = self.phat.n() as f64;
        let mut stat = 0.0;
        for (&c, &pi) in self.phat.counts().iter().zip(p) {
            if pi > 0.0 {
                let d = c as f64 - n * pi;
                stat += d * d / (n * pi);
            } else if c > 0 {
                return false;
            }
        }
        stat <= self.critical
    }
}

/// `k <= e (n / 8π)^{1/3}`, the range where the refined Sanov threshold holds.
pub fn sanov_refined_valid(k: usize, n: u64) -> bool {
    k as f64 <= std::f64::consts::E * (n as f64 / (8.0 * std::f64::consts::PI)).cbrt()
}

pub fn sanov_threshold(k: usize, n: u64, delta: f64, bound: SanovBound) -> f64 {
    if n == 0 {
        return f64::INFINITY;
    }
    let n_f = n as f64;
    match bound {
        SanovBound::Refined => {
            if k < 2 {
                return 0.0;
            }
            let km1 = (k - 1) as f64;
            km1 * (2.0 * km1 / delta).ln() / n_f
        }
        SanovBound::Generic => (k as f64 * (n_f + 1.0).ln() - delta.ln()) / n_f,
    }
}

pub fn sanov_membership(
    p: &SimplexPoint,
    phat: &EmpiricalDistribution,
    delta: f64,
    bound: SanovBound,
) -> Result<bool> {
    check_dims(phat.k(), p.k())?;
    check_delta(delta)?;
    if phat.n() == 0 {
        return Ok(true);
    }
    let threshold = sanov_threshold(phat.k(), phat.n(), delta, bound);
    Ok(kl_slices(&phat.proportions(), p.probs()) <= threshold)
}

pub fn polytope_threshold(k: usize, n: u64, delta: f64) -> f64 {
    if n == 0 {
        return f64::INFINITY;
    }
    (2.0 * k as f64 / delta).ln() / n as f64
}

pub fn polytope_membership(
    p: &SimplexPoint,
    phat: &EmpiricalDistribution,
    delta: f64,
) -> Result<bool> {
    check_dims(phat.k(), p.k())?;
    check_delta(delta)?;
    if phat.n() == 0 {
        return Ok(true);
    }
    let threshold = polytope_threshold(phat.k(), phat.n(), delta);
    Ok(polytope_contains(&phat.proportions(), p.probs(), threshold))
}

#[inline]
fn polytope_contains(phat: &[f64], p: &[f64], threshold: f64) -> bool {
    phat.iter()
        .zip(p)
        .all(|(&a, &b)| kl_bernoulli_unchecked(a, b) <= threshold)
}

#[derive(Debug, Clone)]
enum Inner {
    LevelSet(LevelSetRegion),
    Sanov(f64),
    Polytope(f64),
    /// No data: every construction is the whole simplex.
    Whole,
}

/// A confidence region for one observed `phat`, ready for repeated membership
/// queries.
#[derive(Debug, Clone)]
pub struct ConfidenceRegion {
    spec: RegionSpec,
    accel: Acceleration,
    phat: EmpiricalDistribution,
    center: Vec<f64>,
    chi2_cutoff: f64,
    inner: Inner,
}

impl ConfidenceRegion {
    pub fn new(phat: &EmpiricalDistribution, spec: &RegionSpec) -> Result<Self> {
        Self::with_acceleration(phat, spec, Acceleration::default())
    }

    pub fn with_acceleration(
        phat: &EmpiricalDistribution,
        spec: &RegionSpec,
        accel: Acceleration,
    ) -> Result<Self> {
        spec.check_phat(phat)?;
        let (k, n, delta) = (spec.k, spec.n, spec.delta);
        let inner = if n == 0 {
            Inner::Whole
        } else {
            match spec.construction {
                Construction::LevelSet => {
                    Inner::LevelSet(LevelSetRegion::new(phat.clone(), delta)?)
                }
                Construction::Sanov => Inner::Sanov(sanov_threshold(k, n, delta, spec.sanov_bound)),
                Construction::Polytope => Inner::Polytope(polytope_threshold(k, n, delta)),
            }
        };
        Ok(Self {
            spec: *spec,
            accel,
            phat: phat.clone(),
            center: phat.proportions(),
            chi2_cutoff: (10.0 * delta).min(1.0),
            inner,
        })
    }

    pub fn spec(&self) -> &RegionSpec {
        &self.spec
    }

    pub fn phat(&self) -> &EmpiricalDistribution {
        &self.phat
    }

    pub fn contains(&self, p: &SimplexPoint) -> Result<bool> {
        check_dims(self.spec.k, p.k())?;
        Ok(self.contains_probs(p.probs()))
    }

    /// Membership for a probability slice already known to lie on `Δ_k`.
    pub(crate) fn contains_probs(&self, p: &[f64]) -> bool {
        match &self.inner {
            Inner::Whole => true,
            Inner::Sanov(threshold) => kl_slices(&self.center, p) <= *threshold,
            Inner::Polytope(threshold) => polytope_contains(&self.center, p, *threshold),
            Inner::LevelSet(region) => {
                if self.accel.outer_bound
                    && outer_bound_rejects(&self.center, p, self.spec.n, self.spec.delta)
                {
                    return false;
                }
                if self.accel.chi2_prefilter && self.spec.k >= 2 && p.iter().all(|&x| x > 0.0) {
                    let stat = pearson_unchecked(self.phat.counts(), p, self.spec.n);
                    if chi2_survival(self.spec.k - 1, stat) > self.chi2_cutoff {
                        return true;
                    }
                }
                region.contains_probs(p)
            }
        }
    }
}

/// `p ∈ C(phat)` for the construction selected by `spec`.
pub fn region_membership(
    p: &SimplexPoint,
    phat: &EmpiricalDistribution,
    spec: &RegionSpec,
) -> Result<bool> {
    ConfidenceRegion::new(phat, spec)?.contains(p)
}
