//! Small numerical helpers shared by the other modules.

use statrs::function::gamma::ln_gamma;

/// Compensated (Neumaier) running sum.
#[derive(Debug, Clone, Copy, Default)]
pub struct KahanSum {
    sum: f64,
    compensation: f64,
}

impl KahanSum {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.compensation += (self.sum - t) + x;
        } else {
            self.compensation += (x - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn value(&self) -> f64 {
        self.sum + self.compensation
    }
}

impl FromIterator<f64> for KahanSum {
    fn from_iter<I: IntoIterator<Item = f64>>(iter: I) -> Self {
        let mut acc = KahanSum::new();
        for x in iter {
            acc.add(x);
        }
        acc
    }
}

/// Table of `ln(i!)` for `i = 0..=n`, evaluated through the log-gamma function.
#[derive(Debug, Clone)]
pub struct LnFactorials {
    table: Vec<f64>,
}

impl LnFactorials {
    pub fn new(n: u64) -> Self {
        let table = (0..=n)
            .map(|i| if i < 2 { 0.0 } else { ln_gamma(i as f64 + 1.0) })
            .collect();
        Self { table }
    }

    #[inline]
    pub fn get(&self, i: u64) -> f64 {
        self.table[i as usize]
    }

    pub fn max_n(&self) -> u64 {
        self.table.len() as u64 - 1
    }
}

/// `c * ln(p)` with the convention `0 * ln(0) = 0`.
#[inline]
pub(crate) fn xlogy(c: f64, ln_p: f64) -> f64 {
    if c == 0.0 {
        0.0
    } else {
        c * ln_p
    }
}

/// Exact binomial coefficient, `None` on `u128` overflow.
pub fn binomial_u128(n: u64, k: u64) -> Option<u128> {
    if k > n {
        return Some(0);
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        // acc * (n - i) / (i + 1) stays integral at every step.
        acc = acc.checked_mul((n - i) as u128)? / (i as u128 + 1);
    }
    Some(acc)
}

/// Natural log of the binomial coefficient, for sizes that overflow integers.
pub fn ln_binomial(n: u64, k: u64) -> f64 {
    ln_gamma(n as f64 + 1.0) - ln_gamma(k as f64 + 1.0) - ln_gamma((n - k) as f64 + 1.0)
}
