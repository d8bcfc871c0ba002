//! Library results checked against independent exact or exhaustive oracles.

use mincr::regions::{member_of_covering, p_value};
use mincr::{
    covering_collection, enumerate_simplex, log_pmf, region_membership, sample_dirichlet,
    Construction, EmpiricalDistribution, RegionSpec, SimplexPoint,
};
use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, ToPrimitive, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn big(x: u64) -> BigRational {
    BigRational::from_integer(BigInt::from(x))
}

/// Exact multinomial probability for `p_i = num_i / den`.
fn exact_pmf(counts: &[u64], num: &[u64], den: u64) -> BigRational {
    let n: u64 = counts.iter().sum();
    let mut acc = BigRational::one();
    for i in 1..=n {
        acc *= big(i);
    }
    for (&c, &a) in counts.iter().zip(num) {
        for i in 1..=c {
            acc /= big(i);
        }
        let p = BigRational::new(BigInt::from(a), BigInt::from(den));
        for _ in 0..c {
            acc *= p.clone();
        }
    }
    acc
}

fn random_rational_point(rng: &mut ChaCha8Rng, k: usize, den: u64) -> Vec<u64> {
    // Composition of `den` into k positive parts.
    loop {
        let mut cuts: Vec<u64> = (0..k - 1).map(|_| rng.random_range(1..den)).collect();
        cuts.sort_unstable();
        cuts.dedup();
        if cuts.len() != k - 1 {
            continue;
        }
        let mut parts = Vec::with_capacity(k);
        let mut last = 0;
        for c in cuts {
            parts.push(c - last);
            last = c;
        }
        parts.push(den - last);
        return parts;
    }
}

fn as_point(num: &[u64], den: u64) -> SimplexPoint {
    SimplexPoint::new_normalized(num.iter().map(|&a| a as f64 / den as f64).collect()).unwrap()
}

#[test]
fn log_pmf_matches_big_rational_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(20);
    for _ in 0..20 {
        let den = rng.random_range(10..200);
        let num = random_rational_point(&mut rng, 3, den);
        let p = as_point(&num, den);
        for phat in enumerate_simplex(3, 8).unwrap() {
            let exact = exact_pmf(phat.counts(), &num, den).to_f64().unwrap();
            let got = log_pmf(&phat, &p).unwrap().exp();
            assert!(
                ((got - exact) / exact).abs() < 1e-10,
                "{phat} {num:?}/{den}: {got} vs {exact}"
            );
        }
    }
}

/// Exact `S**(p)` for rational `p`: probability-descending order, exact
/// ties broken lexicographically, shortest prefix reaching `1 - δ`.
fn exact_covering(k: usize, n: u64, num: &[u64], den: u64, delta: &BigRational) -> Vec<Vec<u64>> {
    let mut outcomes: Vec<(Vec<u64>, BigRational)> = enumerate_simplex(k, n)
        .unwrap()
        .into_iter()
        .map(|e| {
            let pr = exact_pmf(e.counts(), num, den);
            (e.counts().to_vec(), pr)
        })
        .collect();
    outcomes.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
    let target = BigRational::one() - delta.clone();
    let mut mass = BigRational::zero();
    let mut members = Vec::new();
    for (c, pr) in outcomes {
        if mass >= target {
            break;
        }
        mass += pr;
        members.push(c);
    }
    members
}

#[test]
fn covering_collection_matches_exact_rational_computation() {
    let mut rng = ChaCha8Rng::seed_from_u64(31);
    for (k, n) in [(2usize, 6u64), (3, 5), (3, 7), (4, 4)] {
        for _ in 0..15 {
            let den = rng.random_range(20..97);
            let num = random_rational_point(&mut rng, k, den);
            let p = as_point(&num, den);
            for (dn, dd) in [(1u64, 10u64), (3, 10), (7, 10)] {
                let delta = dn as f64 / dd as f64;
                let exact =
                    exact_covering(k, n, &num, den, &BigRational::new(dn.into(), dd.into()));
                let s = covering_collection(&p, n, delta).unwrap();
                let got: Vec<Vec<u64>> = s.members().iter().map(|e| e.counts().to_vec()).collect();
                assert_eq!(got, exact, "k={k} n={n} p={num:?}/{den} δ={delta}");
                for phat in enumerate_simplex(k, n).unwrap() {
                    let in_exact = exact.iter().any(|c| c == phat.counts());
                    assert_eq!(member_of_covering(&phat, &p, delta).unwrap(), in_exact);
                }
            }
        }
    }
}

#[test]
fn uniform_ties_follow_lexicographic_order() {
    // Under the uniform p, permutations of a count vector are equiprobable.
    let num = [1u64, 1, 1];
    let p = as_point(&num, 3);
    for (dn, dd) in [(1u64, 2u64), (7, 10), (9, 10)] {
        let exact = exact_covering(3, 5, &num, 3, &BigRational::new(dn.into(), dd.into()));
        let got: Vec<Vec<u64>> = covering_collection(&p, 5, dn as f64 / dd as f64)
            .unwrap()
            .members()
            .iter()
            .map(|e| e.counts().to_vec())
            .collect();
        assert_eq!(got, exact);
    }
}

/// Smallest number of outcomes whose mass reaches `1 - δ`, by trying every
/// subset.
fn exhaustive_minimum(probs: &[f64], delta: f64) -> usize {
    let m = probs.len();
    let mut best = m;
    for mask in 1u32..(1 << m) {
        let size = mask.count_ones() as usize;
        if size >= best {
            continue;
        }
        let mass: f64 = (0..m)
            .filter(|i| mask >> i & 1 == 1)
            .map(|i| probs[i])
            .sum();
        if mass >= 1.0 - delta {
            best = size;
        }
    }
    best
}

#[test]
fn covering_collection_has_minimal_cardinality() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for (k, n) in [(2usize, 4u64), (2, 6), (3, 4)] {
        let outcomes = enumerate_simplex(k, n).unwrap();
        for _ in 0..50 {
            let p = sample_dirichlet(&mut rng, &vec![1.0; k]).unwrap();
            let probs: Vec<f64> = outcomes
                .iter()
                .map(|e| log_pmf(e, &p).unwrap().exp())
                .collect();
            for delta in [0.1, 0.3] {
                let s = covering_collection(&p, n, delta).unwrap();
                assert_eq!(
                    s.len(),
                    exhaustive_minimum(&probs, delta),
                    "k={k} n={n} δ={delta}"
                );
            }
        }
    }
}

#[test]
fn p_value_matches_exact_rational_tail() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    for _ in 0..10 {
        let den = rng.random_range(20..80);
        let num = random_rational_point(&mut rng, 3, den);
        let p = as_point(&num, den);
        let all: Vec<(EmpiricalDistribution, BigRational)> = enumerate_simplex(3, 6)
            .unwrap()
            .into_iter()
            .map(|e| {
                let pr = exact_pmf(e.counts(), &num, den);
                (e, pr)
            })
            .collect();
        for (phat, pr) in &all {
            let tail = all
                .iter()
                .filter(|(_, q)| q <= pr)
                .fold(BigRational::zero(), |acc, (_, q)| acc + q.clone());
            let exact = tail.to_f64().unwrap();
            let got = p_value(phat, &p).unwrap();
            assert!((got - exact).abs() < 1e-12, "{phat}: {got} vs {exact}");
        }
    }
}

#[test]
fn region_and_sorted_collection_agree_on_grid() {
    let grid = mincr::SimplexGrid::new(3, 19).unwrap();
    for delta in [0.1, 0.3, 0.7] {
        for p in grid.iter() {
            let s = covering_collection(&p, 5, delta).unwrap();
            let spec = RegionSpec::new(Construction::LevelSet, 3, 5, delta).unwrap();
            for phat in enumerate_simplex(3, 5).unwrap() {
                assert_eq!(
                    region_membership(&p, &phat, &spec).unwrap(),
                    s.contains(&phat),
                    "{phat} {p:?} δ={delta}"
                );
            }
        }
    }
}
