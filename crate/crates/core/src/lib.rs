//! Exact minimal average volume confidence regions for the multinomial
//! parameter, the confidence intervals they induce on linear functionals, and
//! the baselines and experiments used to compare them.

pub mod bandit;
pub mod error;
pub mod functionals;
pub mod numeric;
pub mod regions;
pub mod simplex;
pub mod volume;

pub use error::{Error, Result};
pub use functionals::{
    functional_interval, IntervalMethod, IntervalResult, LinearFunctional, Scan,
};
pub use regions::{
    covering_collection, member_of_covering, p_value, region_membership, Acceleration, Chi2Region,
    ConfidenceRegion, Construction, CoveringCollection, LevelSetRegion, RegionSpec, SanovBound,
};
pub use simplex::{
    enumerate_simplex, kl_bernoulli, kl_divergence, log_pmf, sample_dirichlet, sample_multinomial,
    EmpiricalDistribution, SimplexGrid, SimplexPoint,
};
