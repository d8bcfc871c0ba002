use std::path::PathBuf;
use std::str::FromStr;

use clap::{Args, Parser, Subcommand, ValueEnum};
use mincr::bandit::BanditMethod;
use mincr::Construction;

#[derive(Debug, Parser)]
#[command(
    name = "mincr",
    version,
    about = "Minimal average volume confidence regions for multinomial parameters",
    arg_required_else_help = true
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Region boundary (k = 3), grid membership, or membership of one point
    Region(RegionArgs),
    /// List the covering collection S**(p)
    Covering(CoveringArgs),
    /// Exact p-value of an observation under p
    Pvalue(PvalueArgs),
    /// Mean interval widths against sample size for phat = (n/10, n/10, 8n/10)
    Widths(WidthsArgs),
    /// Region volumes for every observation in the discrete simplex
    Volume(VolumeArgs),
    /// LUCB stopping times on the five-arm rating instance
    Bandit(BanditArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Csv,
    Json,
}

#[derive(Debug, Args)]
pub struct OutputArgs {
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    pub format: Format,
    /// Output file (a directory for `region` boundary and grid dumps); stdout when omitted
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum RegionMode {
    /// Boundary points of each region, ordered by angle (k = 3 only)
    Boundary,
    /// Membership of every grid point
    Grid,
}

#[derive(Debug, Args)]
pub struct RegionArgs {
    /// Observed counts, e.g. 6,6,3
    #[arg(long)]
    pub phat: Counts,
    #[arg(long)]
    pub k: Option<usize>,
    /// Must equal the sum of the counts when given
    #[arg(long)]
    pub n: Option<u64>,
    #[arg(long)]
    pub delta: f64,
    #[arg(long, default_value = "all")]
    pub construction: Constructions,
    #[arg(long, default_value_t = 200)]
    pub grid: u64,
    /// Query a single point instead of dumping the grid, e.g. 1/3,1/3,1/3
    #[arg(long)]
    pub p: Option<Probs>,
    #[arg(long, value_enum)]
    pub mode: Option<RegionMode>,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Args)]
pub struct CoveringArgs {
    #[arg(long)]
    pub k: Option<usize>,
    #[arg(long)]
    pub n: u64,
    #[arg(long)]
    pub delta: f64,
    /// Probabilities such as 0.2,0.3,0.5 or 1/3,1/3,1/3, or `uniform` (needs --k)
    #[arg(long)]
    pub p: Probs,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Args)]
pub struct PvalueArgs {
    #[arg(long)]
    pub phat: Counts,
    #[arg(long)]
    pub p: Probs,
    #[arg(long)]
    pub k: Option<usize>,
    /// Also report level-set membership at this error level
    #[arg(long)]
    pub delta: Option<f64>,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Args)]
pub struct WidthsArgs {
    /// Sample sizes, comma separated
    #[arg(long, default_value = "10,20,30,40,50", value_delimiter = ',')]
    pub n: Vec<u64>,
    #[arg(long, default_value_t = 0.7)]
    pub delta: f64,
    /// Grid resolution of the level-set scan; max(10n, 150) when omitted
    #[arg(long)]
    pub grid: Option<u64>,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Args)]
pub struct VolumeArgs {
    #[arg(long)]
    pub k: usize,
    #[arg(long)]
    pub n: u64,
    #[arg(long)]
    pub delta: f64,
    #[arg(long, default_value = "all")]
    pub construction: Constructions,
    #[arg(long, default_value_t = 300)]
    pub grid: u64,
    /// Also estimate expected volumes under a flat prior with this many draws (needs --seed)
    #[arg(long)]
    pub draws: Option<u64>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Args)]
pub struct BanditArgs {
    #[arg(long, default_value_t = 10)]
    pub trials: u64,
    /// Trial t uses seed + t
    #[arg(long)]
    pub seed: u64,
    #[arg(long, default_value_t = 0.05)]
    pub delta: f64,
    #[arg(long, default_value_t = 0.0)]
    pub tolerance: f64,
    /// Comma separated subset of levelset, kl-bernoulli, hoeffding
    #[arg(
        long,
        default_value = "levelset,kl-bernoulli,hoeffding",
        value_delimiter = ','
    )]
    pub methods: Vec<BanditMethod>,
    #[arg(long, default_value_t = mincr::bandit::DEFAULT_SAMPLE_CAP)]
    pub max_samples: u64,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Clone)]
pub struct Counts(pub Vec<u64>);

impl FromStr for Counts {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        s.split(',')
            .map(|t| {
                t.trim()
                    .parse::<u64>()
                    .map_err(|e| format!("count '{t}': {e}"))
            })
            .collect::<Result<_, _>>()
            .map(Counts)
    }
}

#[derive(Debug, Clone)]
pub enum Probs {
    Uniform,
    Values(Vec<f64>),
}

fn parse_probability(t: &str) -> Result<f64, String> {
    let t = t.trim();
    let value = match t.split_once('/') {
        Some((a, b)) => {
            let a: f64 = a.trim().parse().map_err(|e| format!("'{t}': {e}"))?;
            let b: f64 = b.trim().parse().map_err(|e| format!("'{t}': {e}"))?;
            a / b
        }
        None => t.parse().map_err(|e| format!("'{t}': {e}"))?,
    };
    if value.is_finite() {
        Ok(value)
    } else {
        Err(format!("'{t}' is not a finite probability"))
    }
}

impl FromStr for Probs {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        if s.trim() == "uniform" {
            return Ok(Probs::Uniform);
        }
        s.split(',')
            .map(parse_probability)
            .collect::<Result<_, _>>()
            .map(Probs::Values)
    }
}

#[derive(Debug, Clone)]
pub struct Constructions(pub Vec<Construction>);

impl FromStr for Constructions {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        if s.trim() == "all" {
            return Ok(Constructions(Construction::ALL.to_vec()));
        }
        let mut list = Vec::new();
        for t in s.split(',') {
            let c: Construction = t.trim().parse().map_err(|e: mincr::Error| e.to_string())?;
            if !list.contains(&c) {
                list.push(c);
            }
        }
        Ok(Constructions(list))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_fractions_and_uniform() {
        match "1/3, 1/3,1/3".parse::<Probs>().unwrap() {
            Probs::Values(v) => assert!((v.iter().sum::<f64>() - 1.0).abs() < 1e-15),
            Probs::Uniform => panic!(),
        }
        assert!(matches!(
            "uniform".parse::<Probs>().unwrap(),
            Probs::Uniform
        ));
        assert!("1/0,1".parse::<Probs>().is_err());
        assert!("a,b".parse::<Probs>().is_err());
    }

    #[test]
    fn parses_counts_and_constructions() {
        assert_eq!("6,6,3".parse::<Counts>().unwrap().0, vec![6, 6, 3]);
        assert!("6,-1".parse::<Counts>().is_err());
        assert_eq!("all".parse::<Constructions>().unwrap().0.len(), 3);
        assert_eq!(
            "sanov,sanov".parse::<Constructions>().unwrap().0,
            vec![Construction::Sanov]
        );
        assert!("box".parse::<Constructions>().is_err());
    }
}
