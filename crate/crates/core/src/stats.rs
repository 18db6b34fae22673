//! Goodness-of-fit tests used by the Monte-Carlo checks.

use serde::Serialize;
use statrs::distribution::{ChiSquared, ContinuousCDF};

/// Outcome of a hypothesis test.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct TestResult {
    pub statistic: f64,
    pub dof: f64,
    pub p_value: f64,
}

impl TestResult {
    pub fn passes(&self, alpha: f64) -> bool {
        self.p_value > alpha
    }
}

const MIN_EXPECTED: f64 = 5.0;

fn chi2_sf(stat: f64, dof: usize) -> f64 {
    if dof == 0 {
        return 1.0;
    }
    ChiSquared::new(dof as f64)
        .expect("positive degrees of freedom")
        .sf(stat)
}

/// Pearson goodness of fit of `counts` against cell probabilities `probs`.
/// Adjacent cells are pooled until each pooled cell expects at least five
/// observations. An observation in a zero-probability cell gives `p = 0`.
pub fn chi_square_gof(counts: &[u64], probs: &[f64]) -> TestResult {
    assert_eq!(counts.len(), probs.len());
    let n: u64 = counts.iter().sum();
    let total_p: f64 = probs.iter().sum();
    if counts.iter().zip(probs).any(|(&c, &p)| c > 0 && p <= 0.0) {
        return TestResult {
            statistic: f64::INFINITY,
            dof: 0.0,
            p_value: 0.0,
        };
    }
    let mut pooled: Vec<(f64, f64)> = Vec::new();
    let (mut obs, mut exp) = (0.0, 0.0);
    for (&c, &p) in counts.iter().zip(probs) {
        obs += c as f64;
        exp += n as f64 * p / total_p;
        if exp >= MIN_EXPECTED {
            pooled.push((obs, exp));
            obs = 0.0;
            exp = 0.0;
        }
    }
    if exp > 0.0 || obs > 0.0 {
        match pooled.last_mut() {
            Some(last) => {
                last.0 += obs;
                last.1 += exp;
            }
            None => pooled.push((obs, exp)),
        }
    }
    let stat: f64 = pooled
        .iter()
        .filter(|(_, e)| *e > 0.0)
        .map(|(o, e)| (o - e).powi(2) / e)
        .sum();
    let dof = pooled.len().saturating_sub(1);
    TestResult {
        statistic: stat,
        dof: dof as f64,
        p_value: chi2_sf(stat, dof),
    }
}

/// Two-sample chi-square test of homogeneity over shared categories.
pub fn chi_square_homogeneity(a: &[u64], b: &[u64]) -> TestResult {
    let len = a.len().max(b.len());
    let get = |v: &[u64], i: usize| v.get(i).copied().unwrap_or(0) as f64;
    let (na, nb) = (a.iter().sum::<u64>() as f64, b.iter().sum::<u64>() as f64);
    let n = na + nb;
    let mut cells: Vec<(f64, f64)> = Vec::new();
    let (mut ca, mut cb) = (0.0, 0.0);
    for i in 0..len {
        ca += get(a, i);
        cb += get(b, i);
        let col = ca + cb;
        if col * na / n >= MIN_EXPECTED && col * nb / n >= MIN_EXPECTED {
            cells.push((ca, cb));
            ca = 0.0;
            cb = 0.0;
        }
    }
    if ca + cb > 0.0 {
        match cells.last_mut() {
            Some(last) => {
                last.0 += ca;
                last.1 += cb;
            }
            None => cells.push((ca, cb)),
        }
    }
    let mut stat = 0.0;
    for &(xa, xb) in &cells {
        let col = xa + xb;
        let (ea, eb) = (col * na / n, col * nb / n);
        stat += (xa - ea).powi(2) / ea + (xb - eb).powi(2) / eb;
    }
    let dof = cells.len().saturating_sub(1);
    TestResult {
        statistic: stat,
        dof: dof as f64,
        p_value: chi2_sf(stat, dof),
    }
}

/// Kolmogorov survival function `Q(λ) = 2 Σ (−1)^{k−1} e^{−2k²λ²}`.
fn kolmogorov_sf(lambda: f64) -> f64 {
    if lambda < 1e-3 {
        return 1.0;
    }
    let mut sum = 0.0;
    for k in 1..=200 {
        let term = (-2.0 * (k * k) as f64 * lambda * lambda).exp();
        sum += if k % 2 == 1 { term } else { -term };
        if term < 1e-16 {
            break;
        }
    }
    (2.0 * sum).clamp(0.0, 1.0)
}

/// Two-sample Kolmogorov–Smirnov test with the asymptotic p-value.
pub fn ks_two_sample(a: &[f64], b: &[f64]) -> TestResult {
    let mut a = a.to_vec();
    let mut b = b.to_vec();
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    let (na, nb) = (a.len(), b.len());
    let (mut i, mut j, mut d) = (0usize, 0usize, 0.0f64);
    while i < na && j < nb {
        let x = a[i].min(b[j]);
        while i < na && a[i] <= x {
            i += 1;
        }
        while j < nb && b[j] <= x {
            j += 1;
        }
        d = d.max((i as f64 / na as f64 - j as f64 / nb as f64).abs());
    }
    let ne = (na * nb) as f64 / (na + nb) as f64;
    let lambda = (ne.sqrt() + 0.12 + 0.11 / ne.sqrt()) * d;
    TestResult {
        statistic: d,
        dof: ne,
        p_value: kolmogorov_sf(lambda),
    }
}

/// One-sample KS against a continuous CDF.
pub fn ks_one_sample(samples: &[f64], cdf: impl Fn(f64) -> f64) -> TestResult {
    let mut x = samples.to_vec();
    x.sort_by(f64::total_cmp);
    let n = x.len() as f64;
    let mut d = 0.0f64;
    for (i, &v) in x.iter().enumerate() {
        let f = cdf(v);
        d = d.max((f - i as f64 / n).abs()).max(((i + 1) as f64 / n - f).abs());
    }
    let lambda = (n.sqrt() + 0.12 + 0.11 / n.sqrt()) * d;
    TestResult {
        statistic: d,
        dof: n,
        p_value: kolmogorov_sf(lambda),
    }
}

/// Half the L1 distance between two probability vectors.
pub fn total_variation(p: &[f64], q: &[f64]) -> f64 {
    assert_eq!(p.len(), q.len());
    0.5 * p.iter().zip(q).map(|(a, b)| (a - b).abs()).sum::<f64>()
}

/// Sample mean and standard error.
pub fn mean_and_se(x: &[f64]) -> (f64, f64) {
    let n = x.len() as f64;
    let mean = x.iter().sum::<f64>() / n;
    let var = x.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

/// `P(X = k)` for `X ~ Poisson(mean)`, for `k = 0..len`.
pub fn poisson_pmf(mean: f64, len: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(len);
    let mut p = (-mean).exp();
    for k in 0..len {
        out.push(p);
        p *= mean / (k + 1) as f64;
    }
    out
}
