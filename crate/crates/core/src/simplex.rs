//! Points of the probability simplex, empirical distributions on the discrete
//! simplex, the multinomial log-pmf and Kullback-Leibler divergences.
//!
//! The discrete simplex `Δ_{k,n}` is always enumerated in ascending
//! lexicographic order of the count vectors; downstream tie-breaking relies on
//! that order.

use std::fmt;

use rand::Rng;
use rand_distr::{Binomial, Distribution, Exp1, Gamma};
use serde::{Deserialize, Serialize};

use crate::error::{check_dims, Error, Result};
use crate::numeric::{binomial_u128, ln_binomial, xlogy, LnFactorials};

/// Tolerance on `|Σ p_i - 1|` accepted by [`SimplexPoint::new`].
pub const SUM_TOLERANCE: f64 = 1e-12;

/// An element of `Δ_{k,n}`: category counts summing to `n`.
///
/// Ordering is lexicographic on the counts.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "Vec<u64>", into = "Vec<u64>")]
pub struct EmpiricalDistribution {
    counts: Vec<u64>,
    n: u64,
}

impl EmpiricalDistribution {
    pub fn new(counts: Vec<u64>) -> Result<Self> {
        if counts.is_empty() {
            return Err(Error::InvalidCounts("need at least one category".into()));
        }
        let n = counts
            .iter()
            .try_fold(0u64, |acc, &c| acc.checked_add(c))
            .ok_or_else(|| Error::InvalidCounts("count total overflows u64".into()))?;
        Ok(Self { counts, n })
    }

    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    pub fn n(&self) -> u64 {
        self.n
    }

    pub fn k(&self) -> usize {
        self.counts.len()
    }

    /// Relative frequencies `n_i / n`. Empty for `n = 0`.
    pub fn proportions(&self) -> Vec<f64> {
        if self.n == 0 {
            return Vec::new();
        }
        let n = self.n as f64;
        self.counts.iter().map(|&c| c as f64 / n).collect()
    }

    /// The empirical distribution viewed as a point of `Δ_k`.
    pub fn to_point(&self) -> Result<SimplexPoint> {
        if self.n == 0 {
            return Err(Error::InvalidCounts(
                "an empty sample has no empirical distribution".into(),
            ));
        }
        Ok(SimplexPoint::from_raw(self.proportions()))
    }
}

impl TryFrom<Vec<u64>> for EmpiricalDistribution {
    type Error = Error;

    fn try_from(counts: Vec<u64>) -> Result<Self> {
        Self::new(counts)
    }
}

impl From<EmpiricalDistribution> for Vec<u64> {
    fn from(e: EmpiricalDistribution) -> Self {
        e.counts
    }
}

impl fmt::Display for EmpiricalDistribution {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(")?;
        for (i, c) in self.counts.iter().enumerate() {
            if i > 0 {
                write!(f, ",")?;
            }
            write!(f, "{c}")?;
        }
        write!(f, ")/{}", self.n)
    }
}

/// An element of `Δ_k`: nonnegative reals summing to one.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct SimplexPoint {
    probs: Vec<f64>,
}

impl SimplexPoint {
    /// Validates without renormalizing: entries must be finite, nonnegative and
    /// sum to one within [`SUM_TOLERANCE`].
    pub fn new(probs: Vec<f64>) -> Result<Self> {
        let sum = Self::validate_entries(&probs)?;
        if (sum - 1.0).abs() > SUM_TOLERANCE {
            return Err(Error::InvalidSimplexPoint(format!(
                "entries sum to {sum}, not 1 (tolerance {SUM_TOLERANCE:e})"
            )));
        }
        Ok(Self { probs })
    }

    /// Rescales a nonnegative vector with positive sum onto the simplex.
    pub fn new_normalized(mut probs: Vec<f64>) -> Result<Self> {
        let sum = Self::validate_entries(&probs)?;
        if sum <= 0.0 {
            return Err(Error::InvalidSimplexPoint("entries sum to zero".into()));
        }
        probs.iter_mut().for_each(|p| *p /= sum);
        Ok(Self { probs })
    }

    pub fn uniform(k: usize) -> Result<Self> {
        if k == 0 {
            return Err(Error::InvalidSimplexPoint(
                "need at least one category".into(),
            ));
        }
        Ok(Self {
            probs: vec![1.0 / k as f64; k],
        })
    }

    /// Internal constructor for vectors that are simplex points by construction.
    pub(crate) fn from_raw(probs: Vec<f64>) -> Self {
        debug_assert!(probs.iter().all(|&p| p >= 0.0));
        debug_assert!((probs.iter().sum::<f64>() - 1.0).abs() <= 1e-9);
        Self { probs }
    }

    fn validate_entries(probs: &[f64]) -> Result<f64> {
        if probs.is_empty() {
            return Err(Error::InvalidSimplexPoint(
                "need at least one category".into(),
            ));
        }
        if let Some(bad) = probs.iter().find(|p| !p.is_finite() || **p < 0.0) {
            return Err(Error::InvalidSimplexPoint(format!(
                "entry {bad} is negative or not finite"
            )));
        }
        Ok(probs.iter().sum())
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn k(&self) -> usize {
        self.probs.len()
    }
}

impl TryFrom<Vec<f64>> for SimplexPoint {
    type Error = Error;

    fn try_from(probs: Vec<f64>) -> Result<Self> {
        Self::new(probs)
    }
}

impl From<SimplexPoint> for Vec<f64> {
    fn from(p: SimplexPoint) -> Self {
        p.probs
    }
}

/// `|Δ_{k,n}| = C(n + k - 1, k - 1)` as a `usize`, or the overflow error
/// carrying the required capacity.
pub fn simplex_size(k: usize, n: u64) -> Result<usize> {
    if k == 0 {
        return Err(Error::InvalidArgument("k must be at least 1".into()));
    }
    let top = n + k as u64 - 1;
    let exact = binomial_u128(top, k as u64 - 1);
    match exact.and_then(|v| usize::try_from(v).ok()) {
        Some(v) => Ok(v),
        None => {
            let required = match exact {
                Some(v) => v.to_string(),
                None => format!(
                    "~1e{:.1}",
                    ln_binomial(top, k as u64 - 1) / std::f64::consts::LN_10
                ),
            };
            Err(Error::EnumerationOverflow { k, n, required })
        }
    }
}

/// Streaming enumeration of the compositions of `n` into `k` nonnegative parts
/// in ascending lexicographic order.
///
/// [`Compositions::advance`] reuses one buffer; the `Iterator` impl clones it.
#[derive(Debug, Clone)]
pub struct Compositions {
    current: Vec<u64>,
    started: bool,
    done: bool,
}

impl Compositions {
    pub fn new(k: usize, n: u64) -> Self {
        let mut current = vec![0; k];
        if let Some(last) = current.last_mut() {
            *last = n;
        }
        Self {
            current,
            started: false,
            done: k == 0,
        }
    }

    pub fn advance(&mut self) -> Option<&[u64]> {
        if self.done {
            return None;
        }
        if !self.started {
            self.started = true;
            return Some(&self.current);
        }
        let k = self.current.len();
        // Last nonzero position.
        let j = match self.current.iter().rposition(|&c| c > 0) {
            Some(j) => j,
            None => {
                self.done = true;
                return None;
            }
        };
        let i = if j == k - 1 {
            if k < 2 {
                self.done = true;
                return None;
            }
            k - 2
        } else if j == 0 {
            self.done = true;
            return None;
        } else {
            j - 1
        };
        let tail = self.current[j];
        self.current[i] += 1;
        self.current[j] = 0;
        self.current[k - 1] = tail - 1;
        Some(&self.current)
    }
}

impl Iterator for Compositions {
    type Item = Vec<u64>;

    fn next(&mut self) -> Option<Vec<u64>> {
        self.advance().map(<[u64]>::to_vec)
    }
}

/// All of `Δ_{k,n}` in lexicographic order.
pub fn enumerate_simplex(k: usize, n: u64) -> Result<Vec<EmpiricalDistribution>> {
    let len = simplex_size(k, n)?;
    let mut out = Vec::with_capacity(len);
    let mut it = Compositions::new(k, n);
    while let Some(c) = it.advance() {
        out.push(EmpiricalDistribution {
            counts: c.to_vec(),
            n,
        });
    }
    debug_assert_eq!(out.len(), len);
    Ok(out)
}

/// The lattice `Δ_{k,M} / M` used to discretize `Δ_k` for scans.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SimplexGrid {
    k: usize,
    resolution: u64,
}

impl SimplexGrid {
    pub fn new(k: usize, resolution: u64) -> Result<Self> {
        if resolution == 0 {
            return Err(Error::ResolutionTooSmall {
                resolution,
                minimum: 1,
            });
        }
        simplex_size(k, resolution)?;
        Ok(Self { k, resolution })
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn resolution(&self) -> u64 {
        self.resolution
    }

    pub fn len(&self) -> usize {
        simplex_size(self.k, self.resolution).expect("checked at construction")
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn iter(&self) -> impl Iterator<Item = SimplexPoint> {
        let m = self.resolution as f64;
        Compositions::new(self.k, self.resolution)
            .map(move |c| SimplexPoint::from_raw(c.iter().map(|&x| x as f64 / m).collect()))
    }
}

/// Multinomial log-probabilities under a fixed `p` with a cached
/// log-factorial table.
#[derive(Debug, Clone)]
pub struct MultinomialLogPmf {
    n: u64,
    ln_p: Vec<f64>,
    ln_fact: LnFactorials,
}

impl MultinomialLogPmf {
    pub fn new(p: &SimplexPoint, n: u64) -> Self {
        Self::with_table(p, LnFactorials::new(n))
    }

    pub fn with_table(p: &SimplexPoint, ln_fact: LnFactorials) -> Self {
        Self {
            n: ln_fact.max_n(),
            ln_p: p.probs().iter().map(|x| x.ln()).collect(),
            ln_fact,
        }
    }

    /// Log-probability of a count vector summing to `n`; `-inf` when a
    /// positive count meets a zero probability.
    #[inline]
    pub fn eval(&self, counts: &[u64]) -> f64 {
        debug_assert_eq!(counts.len(), self.ln_p.len());
        let mut acc = self.ln_fact.get(self.n);
        for (&c, &lp) in counts.iter().zip(&self.ln_p) {
            if c > 0 {
                acc += c as f64 * lp - self.ln_fact.get(c);
            }
        }
        acc
    }

    pub fn n(&self) -> u64 {
        self.n
    }
}

/// `ln P_p(phat)` for the multinomial with `n = phat.n()` trials.
pub fn log_pmf(phat: &EmpiricalDistribution, p: &SimplexPoint) -> Result<f64> {
    check_dims(phat.k(), p.k())?;
    let ln_fact = LnFactorials::new(phat.n());
    let mut acc = ln_fact.get(phat.n());
    for (&c, &pi) in phat.counts().iter().zip(p.probs()) {
        if c > 0 {
            acc += xlogy(c as f64, pi.ln()) - ln_fact.get(c);
        }
    }
    Ok(acc)
}

/// `KL(p || q) = Σ p_i ln(p_i / q_i)` with `0 ln(0/·) = 0`.
pub fn kl_divergence(p: &SimplexPoint, q: &SimplexPoint) -> Result<f64> {
    check_dims(p.k(), q.k())?;
    Ok(kl_slices(p.probs(), q.probs()))
}

#[inline]
pub(crate) fn kl_slices(p: &[f64], q: &[f64]) -> f64 {
    let mut acc = 0.0;
    for (&a, &b) in p.iter().zip(q) {
        if a > 0.0 {
            if b <= 0.0 {
                return f64::INFINITY;
            }
            acc += a * (a / b).ln();
        }
    }
    // Rounding can leave tiny negative totals for p ≈ q.
    acc.max(0.0)
}

/// Two-point KL divergence `KL([a, 1-a] || [b, 1-b])`.
pub fn kl_bernoulli(a: f64, b: f64) -> Result<f64> {
    for (name, value) in [("a", a), ("b", b)] {
        if !(0.0..=1.0).contains(&value) {
            return Err(Error::OutOfUnitInterval { name, value });
        }
    }
    Ok(kl_bernoulli_unchecked(a, b))
}

#[inline]
pub(crate) fn kl_bernoulli_unchecked(a: f64, b: f64) -> f64 {
    kl_slices(&[a, 1.0 - a], &[b, 1.0 - b])
}

/// Draw from `Dirichlet(alphas)` by normalizing independent gamma variates.
pub fn sample_dirichlet<R: Rng + ?Sized>(rng: &mut R, alphas: &[f64]) -> Result<SimplexPoint> {
    if alphas.is_empty() || alphas.iter().any(|a| !(*a > 0.0) || !a.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "Dirichlet parameters {alphas:?}"
        )));
    }
    loop {
        let draws: Vec<f64> = alphas
            .iter()
            .map(|&a| {
                if a == 1.0 {
                    Exp1.sample(rng)
                } else {
                    Gamma::new(a, 1.0).expect("positive shape").sample(rng)
                }
            })
            .collect();
        let total: f64 = draws.iter().sum();
        // Small shapes can underflow every coordinate; redraw.
        if total > 0.0 && total.is_finite() {
            return Ok(SimplexPoint::from_raw(
                draws.iter().map(|x| x / total).collect(),
            ));
        }
    }
}

/// Draw the counts of `n` categorical samples from `p`.
pub fn sample_multinomial<R: Rng + ?Sized>(
    rng: &mut R,
    p: &SimplexPoint,
    n: u64,
) -> EmpiricalDistribution {
    let probs = p.probs();
    let mut counts = vec![0u64; probs.len()];
    let mut remaining = n;
    let mut mass = 1.0;
    for (i, &pi) in probs.iter().enumerate() {
        if remaining == 0 {
            break;
        }
        if i + 1 == probs.len() || mass <= 0.0 {
            counts[i] = remaining;
            break;
        }
        let theta = (pi / mass).clamp(0.0, 1.0);
        let c = Binomial::new(remaining, theta)
            .expect("theta in [0, 1]")
            .sample(rng);
        counts[i] = c;
        remaining -= c;
        mass -= pi;
    }
    EmpiricalDistribution { counts, n }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ed(c: &[u64]) -> EmpiricalDistribution {
        EmpiricalDistribution::new(c.to_vec()).unwrap()
    }

    #[test]
    fn enumerates_in_lexicographic_order() {
        let all = enumerate_simplex(2, 4).unwrap();
        let counts: Vec<&[u64]> = all.iter().map(|e| e.counts()).collect();
        assert_eq!(
            counts,
            vec![&[0, 4][..], &[1, 3], &[2, 2], &[3, 1], &[4, 0]]
        );
        assert!(all.windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn fig1_simplex_has_21_points() {
        assert_eq!(enumerate_simplex(3, 5).unwrap().len(), 21);
    }

    #[test]
    fn single_category_and_empty_sample() {
        let one = enumerate_simplex(1, 7).unwrap();
        assert_eq!(one.len(), 1);
        assert_eq!(one[0].counts(), &[7]);
        let empty = enumerate_simplex(4, 0).unwrap();
        assert_eq!(empty.len(), 1);
        assert_eq!(empty[0].counts(), &[0, 0, 0, 0]);
    }

    #[test]
    fn enumeration_overflow_reports_capacity() {
        match simplex_size(40, 1_000_000) {
            Err(Error::EnumerationOverflow { required, .. }) => {
                assert!(required.starts_with("~1e"))
            }
            other => panic!("expected overflow, got {other:?}"),
        }
        assert!(enumerate_simplex(0, 3).is_err());
    }

    #[test]
    fn simplex_point_validation() {
        assert!(SimplexPoint::new(vec![0.5, 0.5]).is_ok());
        assert!(SimplexPoint::new(vec![0.5, 0.4]).is_err());
        assert!(SimplexPoint::new(vec![1.5, -0.5]).is_err());
        assert!(SimplexPoint::new(vec![]).is_err());
        assert!(SimplexPoint::new(vec![f64::NAN, 1.0]).is_err());
        let p = SimplexPoint::new_normalized(vec![1.0, 1.0, 2.0]).unwrap();
        assert_eq!(p.probs(), &[0.25, 0.25, 0.5]);
        let third = 1.0 / 3.0;
        assert!(SimplexPoint::new(vec![third; 3]).is_ok());
    }

    #[test]
    fn log_pmf_examples() {
        let deterministic = SimplexPoint::new(vec![1.0, 0.0, 0.0]).unwrap();
        assert_eq!(log_pmf(&ed(&[5, 0, 0]), &deterministic).unwrap(), 0.0);
        let impossible = SimplexPoint::new(vec![0.0, 1.0, 0.0]).unwrap();
        assert_eq!(
            log_pmf(&ed(&[1, 0, 0]), &impossible).unwrap(),
            f64::NEG_INFINITY
        );
        let u = SimplexPoint::uniform(3).unwrap();
        let expected = (30.0f64 / 243.0).ln();
        assert!((log_pmf(&ed(&[1, 2, 2]), &u).unwrap() - expected).abs() < 1e-12);
        assert!(matches!(
            log_pmf(&ed(&[1, 2]), &u),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn cached_evaluator_matches_free_function() {
        let p = SimplexPoint::new(vec![0.2, 0.5, 0.3]).unwrap();
        let model = MultinomialLogPmf::new(&p, 8);
        for e in enumerate_simplex(3, 8).unwrap() {
            assert!((model.eval(e.counts()) - log_pmf(&e, &p).unwrap()).abs() < 1e-12);
        }
    }

    #[test]
    fn kl_examples() {
        let p = SimplexPoint::new(vec![0.4, 0.4, 0.2]).unwrap();
        assert_eq!(kl_divergence(&p, &p).unwrap(), 0.0);
        let a = SimplexPoint::new(vec![1.0, 0.0]).unwrap();
        let b = SimplexPoint::new(vec![0.5, 0.5]).unwrap();
        assert!((kl_divergence(&a, &b).unwrap() - 2f64.ln()).abs() < 1e-15);
        assert_eq!(kl_divergence(&b, &a).unwrap(), f64::INFINITY);
        // Direct term-by-term value for (6/15, 6/15, 3/15) against uniform.
        let u = SimplexPoint::uniform(3).unwrap();
        let direct = 2.0 * 0.4 * (0.4f64 * 3.0).ln() + 0.2 * (0.2f64 * 3.0).ln();
        assert!((kl_divergence(&p, &u).unwrap() - direct).abs() < 1e-15);
    }

    #[test]
    fn kl_bernoulli_examples() {
        assert_eq!(kl_bernoulli(0.5, 0.5).unwrap(), 0.0);
        assert!((kl_bernoulli(1.0, 0.5).unwrap() - 2f64.ln()).abs() < 1e-15);
        let direct = 0.4 * (0.4f64 / 0.2).ln() + 0.6 * (0.6f64 / 0.8).ln();
        assert!((kl_bernoulli(0.4, 0.2).unwrap() - direct).abs() < 1e-15);
        assert!(kl_bernoulli(1.2, 0.5).is_err());
        assert!(kl_bernoulli(0.5, -0.1).is_err());
    }

    #[test]
    fn grid_counts_and_validity() {
        let g = SimplexGrid::new(3, 10).unwrap();
        assert_eq!(g.len(), 66);
        let pts: Vec<_> = g.iter().collect();
        assert_eq!(pts.len(), 66);
        for p in &pts {
            assert!(SimplexPoint::new(p.probs().to_vec()).is_ok());
        }
    }

    #[test]
    fn serde_round_trip_validates() {
        let e: EmpiricalDistribution = serde_json::from_str("[1,2,2]").unwrap();
        assert_eq!(e.n(), 5);
        assert!(serde_json::from_str::<SimplexPoint>("[0.5,0.6]").is_err());
    }
}
