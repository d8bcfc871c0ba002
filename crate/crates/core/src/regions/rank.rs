//! Rank mass of an observed outcome under a hypothesized `p`.
//!
//! The rank mass `G` of `phat` is the total probability of the outcomes that
//! precede it in the probability-descending order of `Δ_{k,n}` (ties broken
//! lexicographically). `phat` belongs to the covering collection `S**(p)`
//! exactly when `G < 1 - δ`.
//!
//! Only outcomes at least as probable as `phat` can precede it, so the walk
//! below visits the super-level set `{o : ln P(o) >= ln P(phat) - tol}` and
//! nothing else. Each coordinate is chosen by walking outward from the mode of
//! a binomial bound on the remaining completions; the bound is log-concave in
//! the coordinate so its super-level set is an interval around that mode.

use crate::error::{check_delta, check_dims, Result};
use crate::numeric::{xlogy, KahanSum, LnFactorials};
use crate::simplex::{Compositions, EmpiricalDistribution, MultinomialLogPmf, SimplexPoint};

use super::{equiprobable, TIE_LOG_TOLERANCE};

/// Membership oracle for `C**_δ(phat)`, reusable across many `p`.
#[derive(Debug, Clone)]
pub struct LevelSetRegion {
    phat: EmpiricalDistribution,
    delta: f64,
    ln_fact: LnFactorials,
}

impl LevelSetRegion {
    pub fn new(phat: EmpiricalDistribution, delta: f64) -> Result<Self> {
        check_delta(delta)?;
        let ln_fact = LnFactorials::new(phat.n());
        Ok(Self {
            phat,
            delta,
            ln_fact,
        })
    }

    pub fn phat(&self) -> &EmpiricalDistribution {
        &self.phat
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    /// Full rank mass `G` of `phat` under `p`.
    pub fn rank_mass(&self, p: &SimplexPoint) -> Result<f64> {
        check_dims(self.phat.k(), p.k())?;
        Ok(self.walk(p.probs(), f64::INFINITY))
    }

    /// `p ∈ C**_δ(phat)`, i.e. `phat ∈ S**(p)`.
    pub fn contains(&self, p: &SimplexPoint) -> Result<bool> {
        check_dims(self.phat.k(), p.k())?;
        Ok(self.contains_probs(p.probs()))
    }

    pub(crate) fn contains_probs(&self, p: &[f64]) -> bool {
        let limit = 1.0 - self.delta;
        self.walk(p, limit) < limit
    }

    /// Accumulates the rank mass, stopping once it reaches `limit`.
    fn walk(&self, p: &[f64], limit: f64) -> f64 {
        let target = self.phat.counts();
        let k = target.len();
        let n = self.phat.n();
        let ln_p: Vec<f64> = p.iter().map(|x| x.ln()).collect();

        let mut q = self.ln_fact.get(n);
        for (&c, &lp) in target.iter().zip(&ln_p) {
            q += xlogy(c as f64, lp) - self.ln_fact.get(c);
        }
        if q == f64::NEG_INFINITY {
            // Every positive-probability outcome precedes an impossible one.
            return 1.0;
        }

        let mut suffix = vec![0.0; k + 1];
        for j in (0..k).rev() {
            suffix[j] = suffix[j + 1] + p[j];
        }
        let ln_suffix = suffix.iter().map(|s| s.ln()).collect();

        let mut walker = Walker {
            target,
            ln_fact: &self.ln_fact,
            p,
            ln_p,
            suffix,
            ln_suffix,
            q,
            floor: q - TIE_LOG_TOLERANCE,
            limit,
            sum: KahanSum::new(),
            buf: vec![0; k],
            stopped: false,
        };
        walker.descend(0, n, self.ln_fact.get(n));
        walker.sum.value()
    }
}

struct Walker<'a> {
    target: &'a [u64],
    ln_fact: &'a LnFactorials,
    p: &'a [f64],
    ln_p: Vec<f64>,
    suffix: Vec<f64>,
    ln_suffix: Vec<f64>,
    q: f64,
    floor: f64,
    limit: f64,
    sum: KahanSum,
    buf: Vec<u64>,
    stopped: bool,
}

enum Step {
    Continue,
    Below,
    Stop,
}

#[inline]
fn binomial_mode(r: u64, theta: f64) -> u64 {
    if !(theta > 0.0) {
        0
    } else if theta >= 1.0 {
        r
    } else {
        (((r + 1) as f64 * theta).floor() as u64).min(r)
    }
}

impl Walker<'_> {
    /// `w` carries `ln n! - Σ_{i<j} (ln c_i! - c_i ln p_i)` for the fixed prefix.
    fn descend(&mut self, j: usize, r: u64, w: f64) {
        let k = self.target.len();
        if j + 1 == k {
            self.buf[j] = r;
            let v = w - self.ln_fact.get(r) + xlogy(r as f64, self.ln_p[j]);
            if v >= self.floor {
                self.leaf(v);
            }
            return;
        }
        let theta = if self.suffix[j] > 0.0 {
            self.p[j] / self.suffix[j]
        } else {
            0.0
        };
        let mode = binomial_mode(r, theta);
        let last_pair = j + 2 == k;

        for c in mode..=r {
            match self.step(j, r, c, w, last_pair) {
                Step::Continue => {}
                Step::Below => break,
                Step::Stop => return,
            }
        }
        for c in (0..mode).rev() {
            match self.step(j, r, c, w, last_pair) {
                Step::Continue => {}
                Step::Below => break,
                Step::Stop => return,
            }
        }
    }

    #[inline]
    fn step(&mut self, j: usize, r: u64, c: u64, w: f64, last_pair: bool) -> Step {
        let head = w - self.ln_fact.get(c) + xlogy(c as f64, self.ln_p[j]);
        let rest = r - c;
        if last_pair {
            let v = head - self.ln_fact.get(rest) + xlogy(rest as f64, self.ln_p[j + 1]);
            if !(v >= self.floor) {
                return Step::Below;
            }
            self.buf[j] = c;
            self.buf[j + 1] = rest;
            self.leaf(v);
        } else {
            let bound = head - self.ln_fact.get(rest) + xlogy(rest as f64, self.ln_suffix[j + 1]);
            if !(bound >= self.floor) {
                return Step::Below;
            }
            self.buf[j] = c;
            self.descend(j + 1, rest, head);
        }
        if self.stopped {
            Step::Stop
        } else {
            Step::Continue
        }
    }

    #[inline]
    fn leaf(&mut self, v: f64) {
        let precedes = if equiprobable(v, self.q) {
            self.buf.as_slice() < self.target
        } else {
            v > self.q
        };
        if precedes {
            self.sum.add(v.exp());
            if self.sum.value() >= self.limit {
                self.stopped = true;
            }
        }
    }
}

/// Rank mass by streaming over all of `Δ_{k,n}`; the unpruned reference for
/// [`LevelSetRegion::rank_mass`].
pub fn rank_mass_exhaustive(phat: &EmpiricalDistribution, p: &SimplexPoint) -> Result<f64> {
    check_dims(phat.k(), p.k())?;
    let model = MultinomialLogPmf::new(p, phat.n());
    let q = model.eval(phat.counts());
    if q == f64::NEG_INFINITY {
        return Ok(1.0);
    }
    let mut sum = KahanSum::new();
    let mut it = Compositions::new(phat.k(), phat.n());
    while let Some(c) = it.advance() {
        let v = model.eval(c);
        let precedes = if equiprobable(v, q) {
            c < phat.counts()
        } else {
            v > q
        };
        if precedes {
            sum.add(v.exp());
        }
    }
    Ok(sum.value())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::simplex::{enumerate_simplex, sample_dirichlet};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn pruned_walk_matches_exhaustive_stream() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for (k, n) in [(2usize, 9u64), (3, 8), (4, 6), (5, 4)] {
            for _ in 0..15 {
                let p = sample_dirichlet(&mut rng, &vec![1.0; k]).unwrap();
                for phat in enumerate_simplex(k, n).unwrap() {
                    let region = LevelSetRegion::new(phat.clone(), 0.5).unwrap();
                    let fast = region.rank_mass(&p).unwrap();
                    let slow = rank_mass_exhaustive(&phat, &p).unwrap();
                    assert!(
                        (fast - slow).abs() < 1e-12,
                        "{phat} {p:?}: {fast} vs {slow}"
                    );
                }
            }
        }
    }

    #[test]
    fn handles_zero_probabilities_and_ties() {
        let p = SimplexPoint::new(vec![0.5, 0.0, 0.5]).unwrap();
        for phat in enumerate_simplex(3, 4).unwrap() {
            let region = LevelSetRegion::new(phat.clone(), 0.3).unwrap();
            let fast = region.rank_mass(&p).unwrap();
            let slow = rank_mass_exhaustive(&phat, &p).unwrap();
            assert!((fast - slow).abs() < 1e-12, "{phat}: {fast} vs {slow}");
        }
    }

    #[test]
    fn empty_sample_is_always_covered() {
        let phat = EmpiricalDistribution::new(vec![0, 0, 0]).unwrap();
        let region = LevelSetRegion::new(phat, 0.2).unwrap();
        let p = SimplexPoint::new(vec![0.1, 0.2, 0.7]).unwrap();
        assert!(region.contains(&p).unwrap());
    }

    #[test]
    fn binomial_mode_edges() {
        assert_eq!(binomial_mode(10, 0.0), 0);
        assert_eq!(binomial_mode(10, f64::NAN), 0);
        assert_eq!(binomial_mode(10, 1.0), 10);
        assert_eq!(binomial_mode(10, 0.35), 3);
    }
}
