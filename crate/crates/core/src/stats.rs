//! Goodness-of-fit machinery: energy-distance permutation tests, the
//! one-sample Kolmogorov–Smirnov test and binned chi-square tests.

use rand::seq::SliceRandom;
use rand::Rng;
use statrs::distribution::{ChiSquared, ContinuousCDF, Normal};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TestResult {
    pub statistic: f64,
    pub p_value: f64,
}

/// Energy statistic `nm/(n+m) · (2E|X−Y| − E|X−X′| − E|Y−Y′|)` for scalar samples.
pub fn energy_statistic_1d(x: &[f64], y: &[f64]) -> f64 {
    let mut pooled: Vec<(f64, bool)> = x
        .iter()
        .map(|&v| (v, true))
        .chain(y.iter().map(|&v| (v, false)))
        .collect();
    pooled.sort_by(|a, b| a.0.total_cmp(&b.0));
    let values: Vec<f64> = pooled.iter().map(|p| p.0).collect();
    let labels: Vec<bool> = pooled.iter().map(|p| p.1).collect();
    let total = all_pairs_sum(&values);
    energy_from_labels(&values, &labels, total)
}

fn all_pairs_sum(sorted: &[f64]) -> f64 {
    let mut s = 0.0;
    let mut acc = 0.0;
    for (i, &v) in sorted.iter().enumerate() {
        s += v * i as f64 - acc;
        acc += v;
    }
    s
}

fn energy_from_labels(sorted: &[f64], in_x: &[bool], total: f64) -> f64 {
    let (mut cx, mut sx, mut wx) = (0.0, 0.0, 0.0);
    let (mut cy, mut sy, mut wy) = (0.0, 0.0, 0.0);
    for (&v, &lab) in sorted.iter().zip(in_x) {
        if lab {
            wx += v * cx - sx;
            cx += 1.0;
            sx += v;
        } else {
            wy += v * cy - sy;
            cy += 1.0;
            sy += v;
        }
    }
    let cross = total - wx - wy;
    let e = 2.0 * cross / (cx * cy) - 2.0 * wx / (cx * cx) - 2.0 * wy / (cy * cy);
    cx * cy / (cx + cy) * e
}

/// Permutation test on the 1-D energy statistic; `O(n+m)` per permutation.
pub fn energy_test_1d<R: Rng + ?Sized>(x: &[f64], y: &[f64], permutations: usize, rng: &mut R) -> TestResult {
    let mut pooled: Vec<(f64, bool)> = x
        .iter()
        .map(|&v| (v, true))
        .chain(y.iter().map(|&v| (v, false)))
        .collect();
    pooled.sort_by(|a, b| a.0.total_cmp(&b.0));
    let values: Vec<f64> = pooled.iter().map(|p| p.0).collect();
    let mut labels: Vec<bool> = pooled.iter().map(|p| p.1).collect();
    let total = all_pairs_sum(&values);
    let observed = energy_from_labels(&values, &labels, total);
    let mut exceed = 0usize;
    for _ in 0..permutations {
        labels.shuffle(rng);
        if energy_from_labels(&values, &labels, total) >= observed {
            exceed += 1;
        }
    }
    TestResult {
        statistic: observed,
        p_value: (exceed + 1) as f64 / (permutations + 1) as f64,
    }
}

fn euclid(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(u, v)| (u - v) * (u - v)).sum::<f64>().sqrt()
}

/// Multivariate energy permutation test, `O((n+m)²)` memory and time.
pub fn energy_test<R: Rng + ?Sized>(x: &[Vec<f64>], y: &[Vec<f64>], permutations: usize, rng: &mut R) -> TestResult {
    let pooled: Vec<&[f64]> = x.iter().chain(y).map(|v| v.as_slice()).collect();
    let n = pooled.len();
    let mut dist = vec![0.0; n * n];
    for i in 0..n {
        for j in i + 1..n {
            let d = euclid(pooled[i], pooled[j]);
            dist[i * n + j] = d;
            dist[j * n + i] = d;
        }
    }
    let stat = |idx: &[usize]| {
        let (a, b) = idx.split_at(x.len());
        let (na, nb) = (a.len() as f64, b.len() as f64);
        let mut cross = 0.0;
        for &i in a {
            for &j in b {
                cross += dist[i * n + j];
            }
        }
        let within = |g: &[usize]| {
            let mut s = 0.0;
            for &i in g {
                for &j in g {
                    s += dist[i * n + j];
                }
            }
            s
        };
        let e = 2.0 * cross / (na * nb) - within(a) / (na * na) - within(b) / (nb * nb);
        na * nb / (na + nb) * e
    };
    let mut idx: Vec<usize> = (0..n).collect();
    let observed = stat(&idx);
    let mut exceed = 0usize;
    for _ in 0..permutations {
        idx.shuffle(rng);
        if stat(&idx) >= observed {
            exceed += 1;
        }
    }
    TestResult {
        statistic: observed,
        p_value: (exceed + 1) as f64 / (permutations + 1) as f64,
    }
}

/// Survival function of the Kolmogorov distribution, `P(K > λ)`.
pub fn kolmogorov_sf(lambda: f64) -> f64 {
    if lambda <= 0.0 {
        return 1.0;
    }
    if lambda < 1.0 {
        // Theta-function form converges fast for small λ.
        let t = -std::f64::consts::PI.powi(2) / (8.0 * lambda * lambda);
        let mut s = 0.0;
        for k in 1..=50 {
            let j = (2 * k - 1) as f64;
            s += (t * j * j).exp();
        }
        return (1.0 - (2.0 * std::f64::consts::PI).sqrt() / lambda * s).clamp(0.0, 1.0);
    }
    let mut s = 0.0;
    for k in 1..=100 {
        let kf = k as f64;
        let term = (-2.0 * kf * kf * lambda * lambda).exp();
        s += if k % 2 == 1 { term } else { -term };
        if term < 1e-17 {
            break;
        }
    }
    (2.0 * s).clamp(0.0, 1.0)
}

/// One-sample Kolmogorov–Smirnov test with Stephens' small-sample correction.
pub fn ks_test(samples: &[f64], cdf: impl Fn(f64) -> f64) -> TestResult {
    let mut s = samples.to_vec();
    s.sort_by(f64::total_cmp);
    let n = s.len() as f64;
    let mut d = 0.0f64;
    for (i, &x) in s.iter().enumerate() {
        let f = cdf(x);
        d = d.max(f - i as f64 / n).max((i + 1) as f64 / n - f);
    }
    let sq = n.sqrt();
    TestResult {
        statistic: d,
        p_value: kolmogorov_sf((sq + 0.12 + 0.11 / sq) * d),
    }
}

/// Pearson chi-square test of observed counts against expected counts.
pub fn chi_square_test(observed: &[f64], expected: &[f64], fitted_params: usize) -> TestResult {
    let stat: f64 = observed.iter().zip(expected).map(|(o, e)| (o - e) * (o - e) / e).sum();
    let dof = (observed.len() - 1 - fitted_params) as f64;
    let chi = ChiSquared::new(dof).expect("positive degrees of freedom");
    TestResult {
        statistic: stat,
        p_value: 1.0 - chi.cdf(stat),
    }
}

pub fn normal_cdf(x: f64, mean: f64, sd: f64) -> f64 {
    Normal::new(mean, sd).expect("positive sd").cdf(x)
}

/// Sample mean and standard error of the mean.
pub fn mean_se(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let m = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (n - 1.0).max(1.0);
    (m, (var / n).sqrt())
}
