//! Best-arm identification with LUCB and interchangeable interval methods.
//!
//! Each arm has a categorical reward distribution and payoff values per
//! category. After every arm is sampled once, each round samples the
//! empirical best arm and the challenger with the highest upper bound among
//! the rest, and stops once the best arm's lower bound clears every other
//! upper bound (less the tolerance).
//!
//! An arm with `t` samples gets error budget `δ / (K t (t + 1))`; summing over
//! arms and sample counts gives at most `δ`.
//!
//! Level-set intervals are expensive, so sampling is driven by the intervals
//! of the Pearson χ² region at the same error level. Whenever those intervals
//! call for a stop, the bounds involved are replaced by exact level-set bounds
//! and the stopping rule is re-evaluated, so a run only stops on exact bounds.

use std::fmt;
use std::str::FromStr;

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use statrs::statistics::{Data, Median, OrderStatistics};

use crate::error::{check_delta, check_dims, Error, Result};
use crate::functionals::{
    hoeffding_interval, kl_bernoulli_interval, ray_support, LinearFunctional, RaySearch,
};
use crate::regions::{Chi2Region, ConfidenceRegion, Construction, RegionSpec};
use crate::simplex::{EmpiricalDistribution, SimplexPoint};

pub const DEFAULT_SAMPLE_CAP: u64 = 1_000_000;

pub const SCHEDULE: &str = "delta / (K t (t + 1)), t = samples of the arm";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Arm {
    pmf: SimplexPoint,
    values: LinearFunctional,
}

impl Arm {
    pub fn new(pmf: SimplexPoint, values: LinearFunctional) -> Result<Self> {
        check_dims(values.k(), pmf.k())?;
        Ok(Self { pmf, values })
    }

    pub fn pmf(&self) -> &SimplexPoint {
        &self.pmf
    }

    pub fn values(&self) -> &LinearFunctional {
        &self.values
    }

    pub fn mean(&self) -> f64 {
        self.values.apply_probs(self.pmf.probs())
    }
}

/// Five 3-category rating distributions; 1, 2 and 3 stars pay 0, 1/2 and 1.
pub fn rating_arms() -> Vec<Arm> {
    let values = LinearFunctional::new(vec![0.0, 0.5, 1.0]).expect("finite values");
    [
        [0.1, 0.6, 0.3],
        [0.3, 0.6, 0.1],
        [0.4, 0.5, 0.1],
        [0.6, 0.3, 0.1],
        [0.7, 0.2, 0.1],
    ]
    .iter()
    .map(|p| {
        Arm::new(
            SimplexPoint::new(p.to_vec()).expect("valid pmf"),
            values.clone(),
        )
        .expect("k = 3")
    })
    .collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BanditMethod {
    LevelSet,
    KlBernoulli,
    Hoeffding,
}

impl BanditMethod {
    pub const ALL: [BanditMethod; 3] = [Self::LevelSet, Self::KlBernoulli, Self::Hoeffding];

    pub fn name(&self) -> &'static str {
        match self {
            Self::LevelSet => "levelset",
            Self::KlBernoulli => "kl-bernoulli",
            Self::Hoeffding => "hoeffding",
        }
    }
}

impl fmt::Display for BanditMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for BanditMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| Error::InvalidArgument(format!("unknown bandit method '{s}'")))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LucbConfig {
    pub delta: f64,
    pub tolerance: f64,
    pub method: BanditMethod,
    pub seed: u64,
    pub max_samples: u64,
    pub ray_search: RaySearch,
}

impl LucbConfig {
    pub fn new(delta: f64, tolerance: f64, method: BanditMethod, seed: u64) -> Self {
        Self {
            delta,
            tolerance,
            method,
            seed,
            max_samples: DEFAULT_SAMPLE_CAP,
            ray_search: RaySearch {
                rays: 16,
                bisection_steps: 30,
                refine_candidates: 2,
                refine_steps: 10,
            },
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct BanditRun {
    pub seed: u64,
    pub method: BanditMethod,
    /// Total samples drawn over all arms.
    pub stopping_time: u64,
    pub identified_arm: usize,
    pub per_arm_counts: Vec<u64>,
    pub schedule: String,
    /// Exact level-set bounds computed to confirm stops.
    pub exact_checks: u64,
}

struct ArmState {
    counts: Vec<u64>,
    n: u64,
    sampler: WeightedIndex<f64>,
    approx: Option<(f64, f64)>,
    exact_lower: Option<f64>,
    exact_upper: Option<f64>,
}

impl ArmState {
    fn sample(&mut self, rng: &mut ChaCha8Rng) {
        self.counts[self.sampler.sample(rng)] += 1;
        self.n += 1;
        self.approx = None;
        self.exact_lower = None;
        self.exact_upper = None;
    }

    fn phat(&self) -> EmpiricalDistribution {
        EmpiricalDistribution::new(self.counts.clone()).expect("k >= 1")
    }

    fn lower(&self) -> f64 {
        self.exact_lower
            .unwrap_or_else(|| self.approx.expect("interval computed").0)
    }

    fn upper(&self) -> f64 {
        self.exact_upper
            .unwrap_or_else(|| self.approx.expect("interval computed").1)
    }
}

struct Lucb<'a> {
    arms: &'a [Arm],
    config: &'a LucbConfig,
    exact_checks: u64,
}

impl Lucb<'_> {
    fn arm_delta(&self, n: u64) -> f64 {
        let (k, t) = (self.arms.len() as f64, n as f64);
        self.config.delta / (k * t * (t + 1.0))
    }

    fn interval(&self, arm: usize, state: &ArmState) -> Result<(f64, f64)> {
        let f = self.arms[arm].values();
        let range = f.range();
        let phat = state.phat();
        let mean = f.empirical_mean(&phat)?;
        let delta = self.arm_delta(state.n);
        match self.config.method {
            BanditMethod::Hoeffding => {
                let r = hoeffding_interval(mean, state.n, delta, range)?;
                Ok((r.lower, r.upper))
            }
            BanditMethod::KlBernoulli => {
                let width = range.1 - range.0;
                if width == 0.0 {
                    return Ok((mean, mean));
                }
                let scaled = ((mean - range.0) / width).clamp(0.0, 1.0);
                let r = kl_bernoulli_interval(scaled, state.n, delta)?;
                Ok((range.0 + width * r.lower, range.0 + width * r.upper))
            }
            BanditMethod::LevelSet => {
                let region = Chi2Region::new(&phat, delta)?;
                let center = phat.proportions();
                let contains = |p: &[f64]| region.contains_probs(p);
                support_pair(&center, f, &self.config.ray_search, &contains)
            }
        }
    }

    /// Exact level-set bound; `upper` selects the side.
    fn exact_bound(&mut self, arm: usize, state: &ArmState, upper: bool) -> Result<f64> {
        self.exact_checks += 1;
        let phat = state.phat();
        let spec = RegionSpec::new(
            Construction::LevelSet,
            phat.k(),
            phat.n(),
            self.arm_delta(state.n),
        )?;
        let region = ConfidenceRegion::new(&phat, &spec)?;
        let center = phat.proportions();
        let contains = |p: &[f64]| region.contains_probs(p);
        let f = self.arms[arm].values().values();
        if upper {
            ray_support(&center, f, &self.config.ray_search, &contains)
        } else {
            let neg: Vec<f64> = f.iter().map(|v| -v).collect();
            Ok(-ray_support(
                &center,
                &neg,
                &self.config.ray_search,
                &contains,
            )?)
        }
    }
}

fn support_pair(
    center: &[f64],
    f: &LinearFunctional,
    search: &RaySearch,
    contains: &dyn Fn(&[f64]) -> bool,
) -> Result<(f64, f64)> {
    let upper = ray_support(center, f.values(), search, contains)?;
    let neg: Vec<f64> = f.values().iter().map(|v| -v).collect();
    let lower = -ray_support(center, &neg, search, contains)?;
    Ok((lower, upper))
}

/// Runs LUCB with the default configuration and sample cap.
pub fn lucb_run(
    arms: &[Arm],
    delta: f64,
    tolerance: f64,
    method: BanditMethod,
    seed: u64,
) -> Result<BanditRun> {
    lucb_run_with(arms, &LucbConfig::new(delta, tolerance, method, seed))
}

pub fn lucb_run_with(arms: &[Arm], config: &LucbConfig) -> Result<BanditRun> {
    check_delta(config.delta)?;
    if arms.len() < 2 {
        return Err(Error::InvalidArgument(format!(
            "LUCB needs at least 2 arms, got {}",
            arms.len()
        )));
    }
    if !(config.tolerance >= 0.0) {
        return Err(Error::InvalidArgument(format!(
            "tolerance {} is negative",
            config.tolerance
        )));
    }
    let k = arms[0].pmf().k();
    if arms.iter().any(|a| a.pmf().k() != k) {
        return Err(Error::InvalidArgument(
            "arms must share the number of categories".into(),
        ));
    }
    if config.method == BanditMethod::LevelSet && !(2..=3).contains(&k) {
        return Err(Error::Unsupported(format!(
            "level-set bandit intervals need k = 2 or 3, got k = {k}"
        )));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut states = arms
        .iter()
        .map(|a| {
            Ok(ArmState {
                counts: vec![0; k],
                n: 0,
                sampler: WeightedIndex::new(a.pmf().probs())
                    .map_err(|e| Error::InvalidArgument(format!("arm pmf: {e}")))?,
                approx: None,
                exact_lower: None,
                exact_upper: None,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    for s in states.iter_mut() {
        s.sample(&mut rng);
    }
    let mut total = arms.len() as u64;
    let mut lucb = Lucb {
        arms,
        config,
        exact_checks: 0,
    };
    let exact = config.method == BanditMethod::LevelSet;

    loop {
        for (i, s) in states.iter_mut().enumerate() {
            if s.approx.is_none() {
                s.approx = Some(lucb.interval(i, s)?);
            }
        }
        let means: Vec<f64> = states
            .iter()
            .zip(arms)
            .map(|(s, a)| a.values().empirical_mean(&s.phat()))
            .collect::<Result<_>>()?;
        let best = argmax(&means, None);

        let challenger = loop {
            let uppers: Vec<f64> = states.iter().map(ArmState::upper).collect();
            let challenger = argmax(&uppers, Some(best));
            if states[best].lower() < uppers[challenger] - config.tolerance {
                break Some(challenger);
            }
            if !exact {
                break None;
            }
            if states[best].exact_lower.is_none() {
                let b = lucb.exact_bound(best, &states[best], false)?;
                states[best].exact_lower = Some(b);
                continue;
            }
            let pending = (0..states.len())
                .filter(|&j| j != best && states[j].exact_upper.is_none())
                .max_by(|&a, &b| uppers[a].total_cmp(&uppers[b]).then(b.cmp(&a)));
            match pending {
                Some(j) => {
                    let b = lucb.exact_bound(j, &states[j], true)?;
                    states[j].exact_upper = Some(b);
                }
                None => break None,
            }
        };

        let Some(challenger) = challenger else {
            return Ok(BanditRun {
                seed: config.seed,
                method: config.method,
                stopping_time: total,
                identified_arm: best,
                per_arm_counts: states.iter().map(|s| s.n).collect(),
                schedule: SCHEDULE.to_string(),
                exact_checks: lucb.exact_checks,
            });
        };
        if total + 2 > config.max_samples {
            return Err(Error::SampleCapExceeded {
                cap: config.max_samples,
                per_arm_counts: states.iter().map(|s| s.n).collect(),
            });
        }
        states[best].sample(&mut rng);
        states[challenger].sample(&mut rng);
        total += 2;
    }
}

/// Index of the largest value, skipping `exclude`; ties go to the lower index.
fn argmax(xs: &[f64], exclude: Option<usize>) -> usize {
    let mut best: Option<usize> = None;
    for (i, &x) in xs.iter().enumerate() {
        if Some(i) == exclude {
            continue;
        }
        if best.is_none_or(|b| x > xs[b]) {
            best = Some(i);
        }
    }
    best.expect("at least one candidate")
}

/// Quartiles of stopping times.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct StoppingSummary {
    pub runs: usize,
    pub lower_quartile: f64,
    pub median: f64,
    pub upper_quartile: f64,
}

pub fn summarize(stopping_times: &[u64]) -> Option<StoppingSummary> {
    if stopping_times.is_empty() {
        return None;
    }
    let mut data = Data::new(stopping_times.iter().map(|&t| t as f64).collect::<Vec<_>>());
    Some(StoppingSummary {
        runs: stopping_times.len(),
        lower_quartile: data.lower_quartile(),
        median: data.median(),
        upper_quartile: data.upper_quartile(),
    })
}
