//! The bead model on the cylinder: the interlacing weight `I_q`, the Markov
//! kernel `m_q` and its stationary chain, the determinant form of `I_q`, the
//! product formula for cylinder densities, and the space-time correlation
//! kernel of the resulting determinantal process.

use std::f64::consts::{PI, TAU};

use num_complex::Complex64;
use rand::Rng;

use crate::config::{vandermonde_delta, weak_interlace, winding_length, CircleConfig, WeakInterlace};
use crate::error::{Error, Result};
use crate::matrix::complex_det;
use crate::quadrature::{integrate, integrate_complex_with_breaks, integrate_nested, QuadOptions};
use crate::rng;

const I: Complex64 = Complex64::new(0.0, 1.0);

fn cx(re: f64) -> Complex64 {
    Complex64::new(re, 0.0)
}

/// Model parameters with the normalising constants derived from them.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BeadParams {
    n: usize,
    q: f64,
    log_q: f64,
    c_q: f64,
    c_tilde: f64,
    c: f64,
}

impl BeadParams {
    /// `c_q = ∫_0^{2π} |1 − e^{ir}|^{n−1} q^r dr` by adaptive quadrature.
    pub fn new(n: usize, q: f64) -> Result<Self> {
        if n == 0 || !(q > 0.0 && q.is_finite()) {
            return Err(Error::InvalidConfig(format!("need n ≥ 1 and q > 0, got n={n} q={q}")));
        }
        let log_q = q.ln();
        let c_q = integrate(
            |r| (2.0 * (0.5 * r).sin()).powi(n as i32 - 1) * (log_q * r).exp(),
            0.0,
            TAU,
            QuadOptions::with_tol(0.0, 1e-12),
        )?;
        let factorial: f64 = (1..n).map(|k| k as f64).product();
        let sign = if n % 2 == 1 { 1.0 } else { -1.0 };
        Ok(Self {
            n,
            q,
            log_q,
            c_q,
            c_tilde: c_q / factorial,
            c: sign * (TAU * log_q).exp(),
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn q(&self) -> f64 {
        self.q
    }

    pub fn log_q(&self) -> f64 {
        self.log_q
    }

    pub fn c_q(&self) -> f64 {
        self.c_q
    }

    /// `c_q / (n−1)!`
    pub fn c_tilde(&self) -> f64 {
        self.c_tilde
    }

    /// `(−1)^{n−1} q^{2π}`
    pub fn c(&self) -> f64 {
        self.c
    }

    /// False exactly when `1 − c = 0` (`q = 1`, `n` odd) and `f` is undefined.
    pub fn f_defined(&self) -> bool {
        !(self.q == 1.0 && self.n % 2 == 1)
    }

    /// `z = log q + i(n−1)/2`, so that `g_k = ik − z`.
    fn z(&self) -> Complex64 {
        Complex64::new(self.log_q, 0.5 * (self.n as f64 - 1.0))
    }
}

/// `q^{l(y,z)}` when `y ≺ z` in either orientation, else 0.
pub fn iq_weight(y: &CircleConfig, z: &CircleConfig, q: f64) -> f64 {
    if y.n() != z.n() || weak_interlace(y, z) == WeakInterlace::Neither {
        return 0.0;
    }
    q.powf(winding_length(y, z).expect("interlaced"))
}

/// `f(u) = (q e^{i(n−1)/2})^{u mod 2π} / (1 − (−1)^{n−1} q^{2π})`.
pub fn f_func(u: f64, p: &BeadParams) -> Result<Complex64> {
    if !p.f_defined() {
        return Err(Error::Domain("f has a removable singularity at q = 1 for odd n".into()));
    }
    Ok((p.z() * u.rem_euclid(TAU)).exp() / (1.0 - p.c))
}

/// `g_k = i(k − (n−1)/2) − log q`, the reciprocal Fourier coefficients of `f`.
pub fn g_k(k: i64, p: &BeadParams) -> Complex64 {
    I * k as f64 - p.z()
}

/// `det W` with `W_{jk} = 1` if `a_j ≤ b_k` and `c` otherwise.
pub fn interlace_matrix_det(a: &[f64], b: &[f64], c: f64) -> f64 {
    let rows = a
        .iter()
        .map(|&aj| b.iter().map(|&bk| cx(if aj <= bk { 1.0 } else { c })).collect())
        .collect();
    complex_det(rows).re
}

/// Determinant form of the interlacing weight:
/// `(1 − c) e^{i(n−1)/2 Σ(a_j − b_j)} det(f(b_k − a_j))`.
pub fn iq_det_formula(y: &CircleConfig, z: &CircleConfig, p: &BeadParams) -> Result<Complex64> {
    let (a, b) = (y.angles(), z.angles());
    let rows = a
        .iter()
        .map(|&aj| b.iter().map(|&bk| f_func(bk - aj, p)).collect::<Result<Vec<_>>>())
        .collect::<Result<Vec<_>>>()?;
    let shift: f64 = a.iter().zip(b).map(|(x, y)| x - y).sum();
    let phase = (I * (0.5 * (p.n as f64 - 1.0) * shift)).exp();
    Ok((1.0 - p.c) * phase * complex_det(rows))
}

/// Arc lengths `a_{j+1} − a_j`, the last one wrapping through 2π.
fn arcs(a: &[f64]) -> Vec<f64> {
    let n = a.len();
    (0..n)
        .map(|j| {
            if j + 1 < n {
                a[j + 1] - a[j]
            } else {
                a[0] + TAU - a[n - 1]
            }
        })
        .collect()
}

/// Density `∝ q^t` on `[0, w)`.
fn truncated_exp<R: Rng + ?Sized>(w: f64, log_q: f64, rng: &mut R) -> f64 {
    loop {
        let u: f64 = rng.random();
        let x = log_q * w;
        let t = if x.abs() < 1e-12 {
            u * w
        } else {
            (u * x.exp_m1()).ln_1p() / log_q
        };
        if t < w {
            return t;
        }
    }
}

/// Maximum of `Δ` over `n` points on the circle, attained by the regular polygon.
fn delta_max(n: usize) -> f64 {
    (n as f64).powf(0.5 * n as f64)
}

/// Exact draw from `m_q(y, ·)`. Given `y`, the configurations `z` with
/// `y ≺ z` put one point in each arc `[a_j, a_{j+1})`, and `q^{l(y,z)}`
/// factorises over the arcs: each displacement is a truncated exponential,
/// and the `Δ(z)` factor is imposed by rejection.
pub fn sample_mq<R: Rng + ?Sized>(y: &CircleConfig, p: &BeadParams, rng: &mut R) -> Result<CircleConfig> {
    if y.n() != p.n {
        return Err(Error::InvalidConfig(format!("{} points for an n={} model", y.n(), p.n)));
    }
    if vandermonde_delta(y) <= 0.0 {
        return Err(Error::Precondition("m_q needs distinct points".into()));
    }
    let a = y.angles();
    let gaps = arcs(a);
    let bound = delta_max(p.n);
    for _ in 0..crate::interlace::DEFAULT_ATTEMPTS {
        let z = CircleConfig::from_angles(a.iter().zip(&gaps).map(|(aj, g)| aj + truncated_exp(*g, p.log_q, rng)))?;
        if rng.random::<f64>() * bound < vandermonde_delta(&z) {
            return Ok(z);
        }
    }
    Err(Error::SamplerExhausted(crate::interlace::DEFAULT_ATTEMPTS))
}

/// Eigenvalues of a Haar unitary: uniform angles accepted with `Δ²/n^n`.
pub fn sample_cue<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Result<CircleConfig> {
    if n == 0 || n > 6 {
        return Err(Error::Precondition(format!("CUE sampler supports 1 ≤ n ≤ 6, got {n}")));
    }
    let bound = delta_max(n).powi(2);
    for _ in 0..crate::interlace::DEFAULT_ATTEMPTS {
        let c = CircleConfig::from_angles((0..n).map(|_| rng.random::<f64>() * TAU))?;
        if rng.random::<f64>() * bound < vandermonde_delta(&c).powi(2) {
            return Ok(c);
        }
    }
    Err(Error::SamplerExhausted(crate::interlace::DEFAULT_ATTEMPTS))
}

/// Levels `x¹ ≺ x² ≺ … ≺ x^m`.
#[derive(Debug, Clone, PartialEq)]
pub struct BeadPath {
    levels: Vec<CircleConfig>,
}

impl BeadPath {
    pub fn new(levels: Vec<CircleConfig>) -> Result<Self> {
        if levels.is_empty() {
            return Err(Error::InvalidConfig("empty bead path".into()));
        }
        for w in levels.windows(2) {
            if w[0].n() != w[1].n() || weak_interlace(&w[0], &w[1]) == WeakInterlace::Neither {
                return Err(Error::NotInterlaced(format!(
                    "{:?} then {:?}",
                    w[0].angles(),
                    w[1].angles()
                )));
            }
        }
        Ok(Self { levels })
    }

    pub fn levels(&self) -> &[CircleConfig] {
        &self.levels
    }

    pub fn len(&self) -> usize {
        self.levels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.levels.is_empty()
    }

    /// One row per bead: `level angle`, levels 1-based.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for (r, x) in self.levels.iter().enumerate() {
            for a in x.angles() {
                out.push_str(&format!("{}\t{}\n", r + 1, a));
            }
        }
        out
    }
}

/// Stationary chain: `x¹` from the CUE, then `m_q` steps.
pub fn sample_bead_path<R: Rng + ?Sized>(p: &BeadParams, levels: usize, rng: &mut R) -> Result<BeadPath> {
    let mut xs = vec![sample_cue(p.n, rng)?];
    for r in 1..levels {
        let next = sample_mq(&xs[r - 1], p, rng)?;
        xs.push(next);
    }
    BeadPath::new(xs)
}

/// Both sides of the product formula for the density of `(x¹, …, x^m)`.
#[derive(Debug, Clone, Copy)]
pub struct DensityCheck {
    /// `(2π)^{−n} Δ(x¹)² ∏ m_q(x^r, x^{r+1})`
    pub chain_density: f64,
    /// `Z_m^{−1} ∏_{r=0}^{m} det φ_{r,r+1}`
    pub product_density: Complex64,
    pub relative_error: f64,
    /// `|Δ(x¹)Δ(x^m) − det(e^{i(j−(n+1)/2)a¹_k}) det(e^{−i(j−(n+1)/2)a^m_k})|`
    pub vandermonde_residual: f64,
}

fn exp_matrix(a: &[f64], sign: f64, offset: f64) -> Vec<Vec<Complex64>> {
    let n = a.len();
    (0..n)
        .map(|j| {
            a.iter()
                .map(|&ak| (I * (sign * (j as f64 - offset) * ak)).exp())
                .collect()
        })
        .collect()
}

/// Chain density of a path from the transition densities.
pub fn chain_density(path: &BeadPath, p: &BeadParams) -> f64 {
    let xs = path.levels();
    let mut d = TAU.powi(-(p.n as i32)) * vandermonde_delta(&xs[0]).powi(2);
    for w in xs.windows(2) {
        d *= vandermonde_delta(&w[1]) / vandermonde_delta(&w[0]) * iq_weight(&w[0], &w[1], p.q) / p.c_tilde;
    }
    d
}

/// Product of determinants with boundary rows `a⁰_j = a^{m+1}_j = j − 1`.
pub fn product_density(path: &BeadPath, p: &BeadParams) -> Result<Complex64> {
    let xs = path.levels();
    let m = xs.len();
    if m < 2 {
        return Err(Error::Precondition("product formula needs at least two levels".into()));
    }
    let n = p.n;
    // det(e^{i(j−1)a¹_k}) and det(e^{−i a^m_j (k−1)}), the latter transposed.
    let mut total =
        complex_det(exp_matrix(xs[0].angles(), 1.0, 0.0)) * complex_det(exp_matrix(xs[m - 1].angles(), -1.0, 0.0));
    for w in xs.windows(2) {
        let rows = w[0]
            .angles()
            .iter()
            .map(|&aj| {
                w[1].angles()
                    .iter()
                    .map(|&bk| f_func(bk - aj, p))
                    .collect::<Result<Vec<_>>>()
            })
            .collect::<Result<Vec<_>>>()?;
        total *= complex_det(rows);
    }
    let z_m = (p.c_tilde / (1.0 - p.c)).powi(m as i32 - 1) * TAU.powi(n as i32);
    Ok(total / z_m)
}

pub fn alpha_m_density_check(path: &BeadPath, p: &BeadParams) -> Result<DensityCheck> {
    if !p.f_defined() {
        return Err(Error::Precondition("product formula needs 1 − c ≠ 0".into()));
    }
    let xs = path.levels();
    let m = xs.len();
    let centre = 0.5 * (p.n as f64 + 1.0) - 1.0;
    let vdm = complex_det(exp_matrix(xs[0].angles(), 1.0, centre))
        * complex_det(exp_matrix(xs[m - 1].angles(), -1.0, centre));
    let vandermonde_residual = (vdm - vandermonde_delta(&xs[0]) * vandermonde_delta(&xs[m - 1])).norm();
    let chain = chain_density(path, p);
    let product = product_density(path, p)?;
    Ok(DensityCheck {
        chain_density: chain,
        product_density: product,
        relative_error: (product - chain).norm() / chain.abs(),
        vandermonde_residual,
    })
}

/// Terms kept on each side in the truncated `r < s` branch.
pub const K_MAX: i64 = 500;

/// A kernel value with a bound on the neglected tail (zero for exact branches).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KernelValue {
    pub value: Complex64,
    pub tail_bound: f64,
}

/// `Σ_{k ∉ {0..n−1}} g_k^{−1} e^{ikt}` in closed form: the full series sums to
/// `2π f(t)` (the midpoint at the jump `t ≡ 0`), and at `q = 1`, `n` odd, the
/// singular pieces cancel to `(π − t) e^{ik₀t}` with `k₀ = (n−1)/2`.
fn outer_sum_first_order(t: f64, p: &BeadParams) -> Complex64 {
    let n = p.n as i64;
    let t = t.rem_euclid(TAU);
    if p.f_defined() {
        let full = if t == 0.0 {
            cx(PI * (1.0 + p.c) / (1.0 - p.c))
        } else {
            TAU * (p.z() * t).exp() / (1.0 - p.c)
        };
        let inner: Complex64 = (0..n).map(|k| (I * (k as f64 * t)).exp() / g_k(k, p)).sum();
        full - inner
    } else {
        let k0 = (n - 1) / 2;
        let singular = if t == 0.0 {
            cx(0.0)
        } else {
            (PI - t) * (I * (k0 as f64 * t)).exp()
        };
        let inner: Complex64 = (0..n)
            .filter(|&k| k != k0)
            .map(|k| (I * (k as f64 * t)).exp() / g_k(k, p))
            .sum();
        singular - inner
    }
}

/// Symmetric partial sum `Σ_{|k| ≤ kmax, k ∉ {0..n−1}} g_k^{d} e^{ikt} w^{|k|}`.
fn outer_partial_sum(d: i32, t: f64, p: &BeadParams, kmax: i64, abel: f64) -> Complex64 {
    let n = p.n as i64;
    (-kmax..=kmax)
        .filter(|&k| k < 0 || k >= n)
        .map(|k| g_k(k, p).powi(d) * (I * (k as f64 * t)).exp() * abel.powi(k.abs() as i32))
        .sum()
}

/// `Σ_{|k| > kmax} |g_k|^d` bounded by `2 Σ_{j > kmax − (n−1)/2} j^d`.
fn tail_bound(d: i32, p: &BeadParams, kmax: i64) -> f64 {
    let j0 = kmax as f64 - 0.5 * (p.n as f64 - 1.0) - 1.0;
    2.0 * j0.powi(d + 1) / (-(d + 1)) as f64
}

/// Space-time correlation kernel `K(r, a; s, b)`.
///
/// `r ≥ s`: `(1/2π) Σ_{k=0}^{n−1} g_k^{r−s} e^{i(b−a)k}`. `r < s`: minus the
/// same sum over `k ∉ {0..n−1}`, exact for `r − s = −1` and truncated at
/// `|k| ≤ K_MAX` below that.
pub fn kernel_k(r: i64, a: f64, s: i64, b: f64, p: &BeadParams) -> KernelValue {
    let d = (r - s) as i32;
    let t = b - a;
    if d >= 0 {
        let v: Complex64 = (0..p.n as i64)
            .map(|k| g_k(k, p).powi(d) * (I * (k as f64 * t)).exp())
            .sum();
        return KernelValue {
            value: v / TAU,
            tail_bound: 0.0,
        };
    }
    if d == -1 {
        return KernelValue {
            value: -outer_sum_first_order(t, p) / TAU,
            tail_bound: 0.0,
        };
    }
    KernelValue {
        value: -outer_partial_sum(d, t, p, K_MAX, 1.0) / TAU,
        tail_bound: tail_bound(d, p, K_MAX) / TAU,
    }
}

/// `r < s` branch by plain symmetric truncation (no closed form).
pub fn kernel_k_truncated(r: i64, a: f64, s: i64, b: f64, p: &BeadParams, kmax: i64) -> Complex64 {
    assert!(r < s, "truncated branch is the r < s one");
    -outer_partial_sum((r - s) as i32, b - a, p, kmax, 1.0) / TAU
}

/// `r < s` branch Abel-summed with weight `w^{|k|}`, `w < 1`.
pub fn kernel_k_abel(r: i64, a: f64, s: i64, b: f64, p: &BeadParams, w: f64) -> Complex64 {
    assert!(r < s && w < 1.0);
    let kmax = (50.0 / -w.ln()).ceil() as i64;
    -outer_partial_sum((r - s) as i32, b - a, p, kmax, w) / TAU
}

/// Two-point function of beads at `(r, a)` and `(r+1, b)`, as a function of `t = b − a`.
pub fn adjacent_pair_density(t: f64, p: &BeadParams) -> Complex64 {
    let diag = p.n as f64 / TAU;
    let up = kernel_k(0, 0.0, 1, t, p).value;
    let down = kernel_k(1, t, 0, 0.0, p).value;
    diag * diag - up * down
}

/// Per-bin comparison of a Monte Carlo mean count with its prediction.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BinStat {
    pub observed: f64,
    pub expected: f64,
    pub std_error: f64,
}

impl BinStat {
    pub fn z_score(&self) -> f64 {
        if self.std_error > 0.0 {
            (self.observed - self.expected) / self.std_error
        } else if self.observed == self.expected {
            0.0
        } else {
            f64::INFINITY
        }
    }
}

#[derive(Debug, Clone)]
pub struct CorrelationReport {
    pub n: usize,
    pub q: f64,
    pub samples: usize,
    pub bins: usize,
    /// Mean bead count per bin on the last level.
    pub one_point: Vec<BinStat>,
    /// Mean pair count for bins `(i, j)`, `i` on the second-to-last level,
    /// stored row-major.
    pub two_point: Vec<BinStat>,
}

impl CorrelationReport {
    pub fn one_point_max_z(&self) -> f64 {
        self.one_point.iter().fold(0.0f64, |m, b| m.max(b.z_score().abs()))
    }

    pub fn two_point_fraction_within(&self, z: f64) -> f64 {
        let ok = self.two_point.iter().filter(|b| b.z_score().abs() <= z).count();
        ok as f64 / self.two_point.len() as f64
    }
}

/// Angular bins used by the correlation check.
pub const CORRELATION_BINS: usize = 32;

fn bin_of(a: f64, bins: usize) -> usize {
    ((a / TAU * bins as f64) as usize).min(bins - 1)
}

/// Samples the stationary chain and compares binned one- and two-point
/// counts with the determinantal predictions.
pub fn correlation_mc_check(p: &BeadParams, levels: usize, samples: usize, seed: u64) -> Result<CorrelationReport> {
    if levels < 2 || samples < 2 {
        return Err(Error::Precondition("need at least two levels and two samples".into()));
    }
    let bins = CORRELATION_BINS;
    let paths = rng::par_replicas(seed, samples, |_, r| {
        let path = sample_bead_path(p, levels, r)?;
        let last = path.levels()[levels - 1]
            .angles()
            .iter()
            .map(|&a| bin_of(a, bins))
            .collect::<Vec<_>>();
        let prev = path.levels()[levels - 2]
            .angles()
            .iter()
            .map(|&a| bin_of(a, bins))
            .collect::<Vec<_>>();
        Ok::<_, Error>((prev, last))
    })?;
    let nf = samples as f64;
    let mut s1 = vec![0.0; bins];
    let mut s1sq = vec![0.0; bins];
    let mut s2 = vec![0.0; bins * bins];
    let mut s2sq = vec![0.0; bins * bins];
    for (prev, last) in &paths {
        let mut c1 = std::collections::BTreeMap::new();
        for &b in last {
            *c1.entry(b).or_insert(0.0) += 1.0;
        }
        for (b, c) in c1 {
            s1[b] += c;
            s1sq[b] += c * c;
        }
        let mut c2 = std::collections::BTreeMap::new();
        for &i in prev {
            for &j in last {
                *c2.entry(i * bins + j).or_insert(0.0) += 1.0;
            }
        }
        for (b, c) in c2 {
            s2[b] += c;
            s2sq[b] += c * c;
        }
    }
    let stat = |sum: f64, sq: f64, expected: f64| {
        let mean = sum / nf;
        let var = (sq / nf - mean * mean).max(0.0) * nf / (nf - 1.0);
        BinStat {
            observed: mean,
            expected,
            std_error: (var / nf).sqrt(),
        }
    };
    let one_expected = p.n as f64 / bins as f64;
    let one_point = (0..bins).map(|b| stat(s1[b], s1sq[b], one_expected)).collect();
    // The pair density depends on b − a only: integrate it against the
    // triangular overlap of two bins.
    let h = TAU / bins as f64;
    let mut by_offset = Vec::with_capacity(bins);
    for d in 0..bins {
        let v = integrate_complex_with_breaks(
            |s| adjacent_pair_density(d as f64 * h + s, p) * (h - s.abs()),
            -h,
            h,
            &[0.0],
            QuadOptions::with_tol(1e-12, 1e-9),
        )?;
        by_offset.push(v.value.re);
    }
    let two_point = (0..bins * bins)
        .map(|idx| {
            let (i, j) = (idx / bins, idx % bins);
            stat(s2[idx], s2sq[idx], by_offset[(j + bins - i) % bins])
        })
        .collect();
    Ok(CorrelationReport {
        n: p.n,
        q: p.q,
        samples,
        bins,
        one_point,
        two_point,
    })
}

/// Highest weight `λ_1 ≥ … ≥ λ_n` of an irreducible representation of `U(n)`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SignatureLabel {
    lambda: Vec<i64>,
}

impl SignatureLabel {
    pub fn new(lambda: Vec<i64>) -> Result<Self> {
        if lambda.is_empty() || lambda.windows(2).any(|w| w[0] < w[1]) {
            return Err(Error::InvalidConfig(format!(
                "signature must be non-increasing: {lambda:?}"
            )));
        }
        Ok(Self { lambda })
    }

    pub fn trivial(n: usize) -> Self {
        Self { lambda: vec![0; n] }
    }

    pub fn n(&self) -> usize {
        self.lambda.len()
    }

    pub fn lambda(&self) -> &[i64] {
        &self.lambda
    }

    /// `ρ = ((n−1)/2, (n−1)/2 − 1, …, −(n−1)/2)`
    pub fn rho(n: usize) -> Vec<f64> {
        (0..n).map(|j| 0.5 * (n as f64 - 1.0) - j as f64).collect()
    }

    /// `μ = λ + ρ`
    pub fn mu(&self) -> Vec<f64> {
        self.lambda
            .iter()
            .zip(Self::rho(self.n()))
            .map(|(l, r)| *l as f64 + r)
            .collect()
    }

    /// Weyl dimension formula `∏_{j<k} (μ_j − μ_k)/(k − j)`.
    pub fn dimension(&self) -> f64 {
        let mu = self.mu();
        let n = mu.len();
        let mut d = 1.0;
        for j in 0..n {
            for k in j + 1..n {
                d *= (mu[j] - mu[k]) / (k - j) as f64;
            }
        }
        d
    }
}

/// `χ_λ(y) = i^{n(n−1)/2} Δ(y)^{−1} det(e^{iμ_j a_k})` for angles sorted in `[0, 2π)`.
pub fn weyl_character(label: &SignatureLabel, y: &CircleConfig) -> Result<Complex64> {
    let n = y.n();
    if label.n() != n {
        return Err(Error::InvalidConfig(format!(
            "signature of length {} for {n} points",
            label.n()
        )));
    }
    let delta = vandermonde_delta(y);
    if delta <= 0.0 {
        return Err(Error::Domain(
            "character formula is singular at coincident points".into(),
        ));
    }
    let rows = label
        .mu()
        .iter()
        .map(|&m| y.angles().iter().map(|&a| (I * (m * a)).exp()).collect())
        .collect();
    let phase = I.powi((n * (n - 1) / 2) as i32);
    Ok(phase * complex_det(rows) / delta)
}

/// `c̃_q^{−1} (1 − c) ∏_j (−iμ_j − log q)^{−1}`, with the `q = 1`, odd `n`
/// limit `(1 − c)/(−iμ_j − log q) → 2π` for the factor with `μ_j = 0`.
pub fn character_eigenvalue(label: &SignatureLabel, p: &BeadParams) -> Complex64 {
    let mu = label.mu();
    let mut v = cx(1.0 / p.c_tilde);
    if p.f_defined() {
        v *= 1.0 - p.c;
        for m in mu {
            v /= -I * m - p.log_q;
        }
        return v;
    }
    let mut absorbed = false;
    for m in mu {
        if m == 0.0 {
            v *= TAU;
            absorbed = true;
        } else {
            v /= -I * m - p.log_q;
        }
    }
    if absorbed {
        v
    } else {
        cx(0.0)
    }
}

/// `∫ F(z) q^{Σt} dt` over configurations `z_j = a_j + σ t_j`, `t_j ∈ [0, arc_j)`,
/// where `σ = +1` moves forward into the arcs after `a` and `σ = −1` backward.
fn integrate_over_arcs(
    anchor: &[f64],
    forward: bool,
    log_q: f64,
    f: &dyn Fn(&CircleConfig) -> Complex64,
    opts: QuadOptions,
) -> Result<Complex64> {
    let n = anchor.len();
    let lens: Vec<f64> = if forward {
        arcs(anchor)
    } else {
        (0..n).map(|j| arcs(anchor)[(j + n - 1) % n]).collect()
    };
    let sign = if forward { 1.0 } else { -1.0 };
    // Break where a point crosses the cut at 0 ≡ 2π.
    let limits = |k: usize, _: &[f64]| {
        let cut = if forward { TAU - anchor[k] } else { anchor[k] };
        (0.0, lens[k], vec![cut])
    };
    let integrand = |t: &[f64]| {
        let z = CircleConfig::from_angles(anchor.iter().zip(t).map(|(a, tj)| a + sign * tj)).expect("finite angles");
        f(&z) * (log_q * t.iter().sum::<f64>()).exp()
    };
    integrate_nested(n, &limits, &integrand, opts)
}

/// `(m_q g)(y) = c̃_q^{−1} ∫ Δ(z)/Δ(y) I_q(y, z) g(z) dz`.
pub fn apply_mq(
    y: &CircleConfig,
    p: &BeadParams,
    g: &dyn Fn(&CircleConfig) -> Complex64,
    opts: QuadOptions,
) -> Result<Complex64> {
    let dy = vandermonde_delta(y);
    let v = integrate_over_arcs(y.angles(), true, p.log_q, &|z| vandermonde_delta(z) * g(z), opts)?;
    Ok(v / (dy * p.c_tilde))
}

/// `∫ c̃_q^{−1} Δ(y)/Δ(z) I_q(y, z) dy` for fixed `z`; equals 1.
pub fn reversed_mass(z: &CircleConfig, p: &BeadParams, opts: QuadOptions) -> Result<f64> {
    let dz = vandermonde_delta(z);
    let v = integrate_over_arcs(z.angles(), false, p.log_q, &|y| cx(vandermonde_delta(y)), opts)?;
    Ok(v.re / (dz * p.c_tilde))
}

#[derive(Debug, Clone)]
pub struct EigenvalueReport {
    pub expected: Complex64,
    pub ratios: Vec<Complex64>,
    pub max_relative_deviation: f64,
}

/// Applies `m_q` to `χ_λ` by quadrature at each test point and compares the
/// ratio `(m_q χ_λ)/χ_λ` with the product formula.
pub fn verify_prop_br(label: &SignatureLabel, p: &BeadParams, points: &[CircleConfig]) -> Result<EigenvalueReport> {
    let expected = character_eigenvalue(label, p);
    let opts = QuadOptions::with_tol(1e-13, 1e-10);
    let mut ratios = Vec::with_capacity(points.len());
    for y in points {
        let chi = weyl_character(label, y)?;
        let image = apply_mq(y, p, &|z| weyl_character(label, z).expect("distinct points"), opts)?;
        ratios.push(image / chi);
    }
    let scale = expected.norm().max(1e-300);
    let max_relative_deviation = ratios.iter().fold(0.0f64, |m, r| m.max((r - expected).norm() / scale));
    Ok(EigenvalueReport {
        expected,
        ratios,
        max_relative_deviation,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;
    use crate::stats::{chi_square_test, energy_test, ks_test, mean_se};

    fn cfg(a: &[f64]) -> CircleConfig {
        CircleConfig::new(a.to_vec()).unwrap()
    }

    fn params(n: usize, q: f64) -> BeadParams {
        BeadParams::new(n, q).unwrap()
    }

    #[test]
    fn normalising_constants() {
        // n = 1: ∫ q^r dr
        let p = params(1, 2.0);
        assert!((p.c_q() - (2f64.powf(TAU) - 1.0) / 2f64.ln()).abs() < 1e-10 * p.c_q());
        assert_eq!(params(1, 1.0).c_q(), TAU);
        assert!((params(2, 1.0).c_q() - 8.0).abs() < 1e-10);
        // Stochasticity of m_q pins c_q = (n−1)!(1 − c)/∏(−iρ_j − log q).
        for n in 1..=4 {
            for q in [0.5, 2.0, 1.3] {
                let p = params(n, q);
                let mut prod = cx(1.0);
                for r in SignatureLabel::rho(n) {
                    prod *= -I * r - p.log_q();
                }
                let fact: f64 = (1..n).map(|k| k as f64).product();
                let closed = fact * (1.0 - p.c()) / prod;
                assert!((closed - p.c_q()).norm() < 1e-10 * p.c_q(), "n={n} q={q}");
            }
        }
        assert!(BeadParams::new(2, 0.0).is_err());
    }

    #[test]
    fn interlacing_weight_examples() {
        assert_eq!(iq_weight(&cfg(&[0.0]), &cfg(&[1.0]), 2.0), 2.0);
        assert!((iq_weight(&cfg(&[0.0, 2.0]), &cfg(&[1.0, 3.0]), 0.5) - 0.25).abs() < 1e-15);
        assert_eq!(iq_weight(&cfg(&[0.0, 1.0]), &cfg(&[2.0, 3.0]), 0.5), 0.0);
        // a ≻ b picks up the extra 2π.
        let w = iq_weight(&cfg(&[1.0, 3.0]), &cfg(&[0.5, 2.0]), 2.0);
        assert!((w - 2f64.powf(-1.5 + TAU)).abs() < 1e-12 * w);
    }

    #[test]
    fn g_values_and_fourier_identity() {
        assert!((g_k(0, &params(2, 1.0)) - Complex64::new(0.0, -0.5)).norm() < 1e-15);
        for n in 1..=3 {
            for q in [0.5, 2.0] {
                let p = params(n, q);
                for k in -5..=5 {
                    let v = integrate_complex_with_breaks(
                        |u| f_func(u, &p).unwrap() * (-I * (u * k as f64)).exp(),
                        0.0,
                        TAU,
                        &[],
                        QuadOptions::with_tol(0.0, 1e-12),
                    )
                    .unwrap()
                    .value;
                    let expect = 1.0 / g_k(k, &p);
                    assert!((v - expect).norm() <= 1e-8 * expect.norm(), "n={n} q={q} k={k}");
                    assert!(g_k(k, &p).norm() > 0.0);
                }
            }
        }
        assert!(f_func(0.3, &params(3, 1.0)).is_err());
        assert!(f_func(0.3, &params(2, 1.0)).is_ok());
    }

    fn random_config<R: Rng>(n: usize, r: &mut R) -> CircleConfig {
        CircleConfig::from_angles((0..n).map(|_| r.random::<f64>() * TAU)).unwrap()
    }

    #[test]
    fn interlace_matrix_case_analysis() {
        let mut r = rng::master(1);
        let c = 0.37;
        let mut seen = [0usize; 3];
        for _ in 0..5000 {
            let n = 2 + (r.random::<u32>() % 3) as usize;
            let y = random_config(n, &mut r);
            let z = if r.random::<bool>() {
                sample_mq(&y, &params(n, 1.0), &mut r).unwrap()
            } else {
                random_config(n, &mut r)
            };
            let d = interlace_matrix_det(y.angles(), z.angles(), c);
            let (expect, idx) = match weak_interlace(&y, &z) {
                WeakInterlace::Prec => ((1.0 - c).powi(n as i32 - 1), 0),
                WeakInterlace::Succ => (c * (c - 1.0).powi(n as i32 - 1), 1),
                WeakInterlace::Neither => (0.0, 2),
            };
            seen[idx] += 1;
            assert!((d - expect).abs() < 1e-10);
        }
        assert!(seen.iter().all(|&s| s > 100));
        // q = 1, n = 2: c = −1 and det W = 2 on a ≺ b.
        let p = params(2, 1.0);
        assert_eq!(interlace_matrix_det(&[0.0, 2.0], &[1.0, 3.0], p.c()), 2.0);
    }

    #[test]
    fn determinant_formula_matches_weight() {
        let mut r = rng::master(2);
        for q in [0.5, 2.0] {
            let p1 = params(1, q);
            let w = iq_det_formula(&cfg(&[4.0]), &cfg(&[1.0]), &p1).unwrap();
            assert!((w.re - q.powf(1.0 - 4.0 + TAU)).abs() < 1e-12 * w.re.abs().max(1.0));
            for n in 2..=4 {
                let p = params(n, q);
                for i in 0..300 {
                    let y = random_config(n, &mut r);
                    let z = if i % 2 == 0 {
                        sample_mq(&y, &p, &mut r).unwrap()
                    } else {
                        random_config(n, &mut r)
                    };
                    let weight = iq_weight(&y, &z, q);
                    let det = iq_det_formula(&y, &z, &p).unwrap();
                    assert!(
                        (det.re - weight).abs() <= 1e-10 * weight.max(1.0),
                        "n={n} q={q}: {det} vs {weight}"
                    );
                    assert!(det.im.abs() <= 1e-10 * weight.max(1.0));
                }
            }
        }
    }

    #[test]
    fn single_particle_mq_is_truncated_exponential() {
        let p = params(1, 2.0);
        let y = cfg(&[1.0]);
        let mut r = rng::master(3);
        let disp: Vec<f64> = (0..4000)
            .map(|_| (sample_mq(&y, &p, &mut r).unwrap().angles()[0] - 1.0).rem_euclid(TAU))
            .collect();
        let l = p.log_q();
        let cdf = |t: f64| ((l * t.clamp(0.0, TAU)).exp() - 1.0) / ((l * TAU).exp() - 1.0);
        assert!(ks_test(&disp, cdf).p_value > 0.01);
    }

    #[test]
    fn mq_samples_interlace_and_preserve_cue() {
        let p = params(2, 2.0);
        let pairs = rng::par_replicas(4, 1500, |_, r| {
            let y = sample_cue(2, r)?;
            let z = sample_mq(&y, &p, r)?;
            let fresh = sample_cue(2, r)?;
            Ok::<_, Error>((y, z, fresh))
        })
        .unwrap();
        assert!(pairs
            .iter()
            .all(|(y, z, _)| weak_interlace(y, z) != WeakInterlace::Neither));
        let zs: Vec<Vec<f64>> = pairs.iter().map(|(_, z, _)| z.angles().to_vec()).collect();
        let fresh: Vec<Vec<f64>> = pairs.iter().map(|(_, _, f)| f.angles().to_vec()).collect();
        assert!(energy_test(&zs, &fresh, 200, &mut rng::master(5)).p_value > 0.01);
    }

    #[test]
    fn cue_gap_law_and_uniform_intensity() {
        let mut r = rng::master(6);
        let samples: Vec<CircleConfig> = (0..20_000).map(|_| sample_cue(2, &mut r).unwrap()).collect();
        // Sorted gap g = a₂ − a₁ has density ∝ (2π − g) |e^{ig} − 1|².
        let bins = 16;
        let mut obs = vec![0.0; bins];
        for s in &samples {
            let g = s.angles()[1] - s.angles()[0];
            obs[bin_of(g, bins)] += 1.0;
        }
        let h = TAU / bins as f64;
        let weight = |g: f64| (TAU - g) * (0.5 * g).sin().powi(2);
        let norm = integrate(weight, 0.0, TAU, Default::default()).unwrap();
        let exp: Vec<f64> = (0..bins)
            .map(|b| {
                let mass = integrate(weight, b as f64 * h, (b + 1) as f64 * h, Default::default()).unwrap();
                mass / norm * samples.len() as f64
            })
            .collect();
        assert!(chi_square_test(&obs, &exp, 0).p_value > 0.01);
        let mut counts = vec![0.0; bins];
        for s in &samples {
            for &a in s.angles() {
                counts[bin_of(a, bins)] += 1.0;
            }
        }
        let flat = vec![2.0 * samples.len() as f64 / bins as f64; bins];
        assert!(chi_square_test(&counts, &flat, 0).p_value > 0.001);
        assert!(sample_cue(7, &mut r).is_err());
    }

    #[test]
    fn product_formula_examples() {
        let mut r = rng::master(7);
        for (n, m, q) in [
            (1usize, 2usize, 2.0),
            (2, 3, 2.0),
            (3, 2, 0.5),
            (3, 4, 2.0),
            (2, 4, 0.5),
        ] {
            let p = params(n, q);
            for _ in 0..20 {
                let path = sample_bead_path(&p, m, &mut r).unwrap();
                let c = alpha_m_density_check(&path, &p).unwrap();
                assert!(c.relative_error <= 1e-9, "n={n} m={m} q={q}: {c:?}");
                assert!(c.vandermonde_residual < 1e-10);
            }
        }
        // Scalar case by hand: c̃_q^{-1} (2π)^{-1} q^l.
        let p = params(1, 2.0);
        let path = BeadPath::new(vec![cfg(&[1.0]), cfg(&[2.5])]).unwrap();
        let hand = 2f64.powf(1.5) / (p.c_tilde() * TAU);
        assert!((chain_density(&path, &p) - hand).abs() < 1e-14 * hand);
        assert!(alpha_m_density_check(&path, &params(1, 1.0)).is_err());
    }

    #[test]
    fn product_formula_marginalises() {
        // Integrating out the last level leaves the density of the shorter path.
        for (n, q) in [(1usize, 2.0), (2, 0.5)] {
            let p = params(n, q);
            let path = sample_bead_path(&p, 3, &mut rng::master(8)).unwrap();
            let short = BeadPath::new(path.levels()[..2].to_vec()).unwrap();
            let last = path.levels()[1].angles().to_vec();
            let f = |z: &CircleConfig| {
                let mut lv = short.levels().to_vec();
                lv.push(z.clone());
                product_density(&BeadPath::new(lv).unwrap(), &p).unwrap()
                    * (-p.log_q() * winding_length(&short.levels()[1], z).unwrap()).exp()
            };
            let total = integrate_over_arcs(&last, true, p.log_q(), &f, QuadOptions::with_tol(1e-14, 1e-9)).unwrap();
            let expect = product_density(&short, &p).unwrap();
            assert!(
                (total - expect).norm() <= 1e-6 * expect.norm(),
                "n={n}: {total} vs {expect}"
            );
        }
    }

    #[test]
    fn reversed_kernel_is_stochastic() {
        for (n, q) in [(1usize, 2.0), (2, 0.5), (2, 1.0)] {
            let p = params(n, q);
            let z = sample_cue(n, &mut rng::master(9)).unwrap();
            let mass = reversed_mass(&z, &p, QuadOptions::with_tol(1e-13, 1e-10)).unwrap();
            assert!((mass - 1.0).abs() < 1e-8, "n={n} q={q}: {mass}");
        }
    }

    #[test]
    fn kernel_diagonal_and_simple_values() {
        for n in 1..=3 {
            for q in [0.5, 1.0, 2.0] {
                let p = params(n, q);
                let k = kernel_k(4, 1.3, 4, 1.3, &p);
                assert!((k.value - cx(n as f64 / TAU)).norm() < 1e-14);
                let total = integrate(|a| kernel_k(0, a, 0, a, &p).value.re, 0.0, TAU, Default::default()).unwrap();
                assert!((total - n as f64).abs() < 1e-12);
            }
        }
        let k = kernel_k(1, 0.7, 0, 0.7, &params(2, 1.0));
        assert!(k.value.norm() < 1e-15);
    }

    #[test]
    fn single_particle_pair_density_is_transition_density() {
        // For n = 1 the pair density of adjacent levels is (2π)^{-1} m_q(a, b).
        for q in [0.5, 1.0, 2.0] {
            let p = params(1, q);
            for t in [0.1, 1.0, 3.0, 6.0] {
                let rho2 = adjacent_pair_density(t, &p);
                let exact = q.powf(t) / (p.c_tilde() * TAU);
                assert!((rho2 - cx(exact)).norm() < 1e-12, "q={q} t={t}");
            }
        }
    }

    #[test]
    fn first_order_branch_matches_truncation_and_abel() {
        for (n, q) in [(1usize, 2.0), (2, 0.5), (2, 1.0), (3, 1.0), (3, 2.0)] {
            let p = params(n, q);
            for t in [0.4, 2.0, 5.5] {
                let exact = kernel_k(0, 0.0, 1, t, &p).value;
                let trunc = kernel_k_truncated(0, 0.0, 1, t, &p, 20_000);
                let abel = kernel_k_abel(0, 0.0, 1, t, &p, 0.9999);
                assert!((exact - trunc).norm() < 1e-3, "n={n} q={q} t={t}: {exact} vs {trunc}");
                assert!((exact - abel).norm() < 1e-3, "n={n} q={q} t={t}: {exact} vs {abel}");
            }
        }
    }

    #[test]
    fn odd_n_unit_q_is_the_continuous_limit() {
        let at = |q: f64, d: i64, t: f64| kernel_k(0, 0.0, -d, t, &params(3, q)).value;
        for d in [-1, -2] {
            for t in [0.5, 2.5] {
                let mid = at(1.0, d, t);
                let lim = 0.5 * (at(1e-6f64.exp(), d, t) + at((-1e-6f64).exp(), d, t));
                assert!((mid - lim).norm() < 1e-6, "d={d} t={t}: {mid} vs {lim}");
            }
        }
    }

    #[test]
    fn deeper_branch_reports_tail() {
        let p = params(2, 2.0);
        let k = kernel_k(0, 0.0, 3, 1.0, &p);
        assert!(k.tail_bound > 0.0 && k.tail_bound < 1e-5);
        let finer = kernel_k_truncated(0, 0.0, 3, 1.0, &p, 20_000);
        assert!((k.value - finer).norm() <= k.tail_bound);
    }

    #[test]
    fn equal_level_kernel_is_hermitian() {
        for q in [0.5, 1.0, 2.0] {
            let p = params(3, q);
            let (a, b) = (0.4, 2.9);
            let k1 = kernel_k(2, a, 2, b, &p).value;
            let k2 = kernel_k(2, b, 2, a, &p).value;
            assert!((k1.conj() - k2).norm() < 1e-14);
        }
    }

    #[test]
    fn characters() {
        let mut r = rng::master(10);
        for n in 1..=4 {
            let y = random_config(n, &mut r);
            let chi = weyl_character(&SignatureLabel::trivial(n), &y).unwrap();
            assert!((chi - cx(1.0)).norm() < 1e-10, "n={n}: {chi}");
        }
        let y = cfg(&[2.2]);
        let chi = weyl_character(&SignatureLabel::new(vec![3]).unwrap(), &y).unwrap();
        assert!((chi - (I * 6.6).exp()).norm() < 1e-12);
        assert!(SignatureLabel::new(vec![0, 1]).is_err());
        assert_eq!(SignatureLabel::new(vec![1, 0]).unwrap().dimension(), 2.0);
        assert_eq!(SignatureLabel::new(vec![2, 1, 0]).unwrap().dimension(), 8.0);
        // Normalisation ∫|χ|² dμ = 1 for the standard representation of U(2).
        let label = SignatureLabel::new(vec![1, 0]).unwrap();
        let vals: Vec<f64> = (0..20_000)
            .map(|_| {
                weyl_character(&label, &sample_cue(2, &mut r).unwrap())
                    .unwrap()
                    .norm_sqr()
            })
            .collect();
        let (m, se) = mean_se(&vals);
        assert!((m - 1.0).abs() < 3.0 * se, "{m} ± {se}");
    }

    #[test]
    fn character_eigenvalues_single_particle() {
        for q in [0.5, 2.0] {
            let p = params(1, q);
            for k in [-2i64, 0, 3] {
                let label = SignatureLabel::new(vec![k]).unwrap();
                let l = p.log_q();
                let closed = (1.0 - q.powf(TAU)) * l / ((q.powf(TAU) - 1.0) * (-I * k as f64 - l));
                assert!((character_eigenvalue(&label, &p) - closed).norm() < 1e-10);
                let rep = verify_prop_br(&label, &p, &[cfg(&[0.3]), cfg(&[4.0])]).unwrap();
                assert!(rep.max_relative_deviation < 1e-8, "{rep:?}");
            }
        }
        let p = params(3, 1.0);
        assert!((character_eigenvalue(&SignatureLabel::trivial(3), &p) - cx(1.0)).norm() < 1e-10);
    }

    #[test]
    fn character_eigenvalues_two_particles() {
        let p = params(2, 2.0);
        let points = [
            cfg(&[0.2, 1.1]),
            cfg(&[0.5, 4.0]),
            cfg(&[2.0, 5.9]),
            cfg(&[3.0, 3.5]),
            cfg(&[1.0, 6.0]),
        ];
        for lambda in [vec![0, 0], vec![1, 0], vec![1, 1]] {
            let label = SignatureLabel::new(lambda).unwrap();
            let rep = verify_prop_br(&label, &p, &points).unwrap();
            assert!(rep.max_relative_deviation < 1e-6, "{rep:?}");
        }
        let trivial = verify_prop_br(&SignatureLabel::trivial(2), &params(2, 1.0), &points[..2]).unwrap();
        assert!((trivial.expected - cx(1.0)).norm() < 1e-10);
    }

    #[test]
    fn correlation_check_small_sample() {
        let p = params(2, 2.0);
        let rep = correlation_mc_check(&p, 2, 4000, 11).unwrap();
        assert!(rep.one_point_max_z() < 4.5);
        assert!(rep.two_point_fraction_within(3.0) > 0.9);
        let total: f64 = rep.two_point.iter().map(|b| b.expected).sum();
        assert!((total - 4.0).abs() < 1e-6);
    }

    #[test]
    fn binned_counts_pass_aggregate_chi_square() {
        for q in [1.0, 2.0] {
            let rep = correlation_mc_check(&params(2, q), 2, 200_000, 12).unwrap();
            let one: f64 = rep.one_point.iter().map(|b| b.z_score().powi(2)).sum();
            let two: f64 = rep.two_point.iter().map(|b| b.z_score().powi(2)).sum();
            let chi = |x: f64, k: f64| 1.0 - statrs::function::gamma::gamma_lr(0.5 * k, 0.5 * x);
            assert!(chi(one, 32.0) > 1e-3, "q={q}: one-point χ² {one}");
            assert!(chi(two, 1024.0) > 1e-3, "q={q}: two-point χ² {two}");
        }
    }
}
