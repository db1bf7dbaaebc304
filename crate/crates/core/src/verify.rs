//! Verification suites: each criterion runs a batch of checks and reports the
//! measured residual against its tolerance. Reports are deterministic given
//! the seed.

use std::f64::consts::{PI, SQRT_2, TAU};
use std::fmt::Write as _;

use num_complex::Complex64;
use rand::Rng;

use crate::bead::{
    self, alpha_m_density_check, correlation_mc_check, g_k, iq_det_formula, iq_weight, sample_bead_path, sample_mq,
    verify_prop_br, BeadParams, SignatureLabel,
};
use crate::brownian::{interval_reflection_formulas, verify_n2_coupling, verify_time_reversal, IntervalCoupling};
use crate::circle_discrete::{
    circle_states, lattice_interlace_kernel, lattice_q_kernel, m_kernel, perron_check_delta, up_moves, verify_prop_crsk,
};
use crate::config::{weak_interlace, AlcovePoint, CircleConfig, DiscreteConfig, WeakInterlace};
use crate::error::{Error, Result};
use crate::gt_line::verify_prop_rsk;
use crate::interlace::{
    periodic_skorohod, phi_map, psi_involution_residual, psi_map, run_coupling, sample_q_r, CouplingKind,
    DEFAULT_ATTEMPTS,
};
use crate::quadrature::{integrate_complex_with_breaks, QuadOptions};
use crate::rng;
use crate::stats::energy_test_1d;

/// Whether a measured value must stay below or above its threshold.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Bound {
    AtMost,
    AtLeast,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: String,
    pub measured: f64,
    pub threshold: f64,
    pub bound: Bound,
}

impl Check {
    pub fn at_most(name: impl Into<String>, measured: f64, threshold: f64) -> Self {
        Self {
            name: name.into(),
            measured,
            threshold,
            bound: Bound::AtMost,
        }
    }

    pub fn at_least(name: impl Into<String>, measured: f64, threshold: f64) -> Self {
        Self {
            name: name.into(),
            measured,
            threshold,
            bound: Bound::AtLeast,
        }
    }

    pub fn passed(&self) -> bool {
        match self.bound {
            Bound::AtMost => self.measured <= self.threshold,
            Bound::AtLeast => self.measured >= self.threshold,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CriterionReport {
    pub id: u32,
    pub title: &'static str,
    pub checks: Vec<Check>,
    /// Set when the criterion could not run to completion.
    pub error: Option<String>,
}

impl CriterionReport {
    pub fn passed(&self) -> bool {
        self.error.is_none() && !self.checks.is_empty() && self.checks.iter().all(Check::passed)
    }

    /// `PASS`/`FAIL` line followed by one `key=value` line per check.
    pub fn to_text(&self) -> String {
        let mut out = format!(
            "criterion={} status={} title=\"{}\"\n",
            self.id,
            if self.passed() { "PASS" } else { "FAIL" },
            self.title
        );
        for c in &self.checks {
            let rel = match c.bound {
                Bound::AtMost => "<=",
                Bound::AtLeast => ">=",
            };
            let _ = writeln!(
                out,
                "  check={} measured={:e} {} threshold={:e} status={}",
                c.name,
                c.measured,
                rel,
                c.threshold,
                if c.passed() { "PASS" } else { "FAIL" }
            );
        }
        if let Some(e) = &self.error {
            let _ = writeln!(out, "  error=\"{e}\"");
        }
        out
    }
}

/// Sample sizes: `Full` uses the acceptance sizes, `Quick` a desk-check subset.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scale {
    Quick,
    Full,
}

impl Scale {
    fn pick(self, quick: usize, full: usize) -> usize {
        match self {
            Scale::Quick => quick,
            Scale::Full => full,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Suite {
    Discrete,
    Couplings,
    Brownian,
    Bead,
    All,
}

impl std::str::FromStr for Suite {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "discrete" => Ok(Suite::Discrete),
            "couplings" => Ok(Suite::Couplings),
            "brownian" => Ok(Suite::Brownian),
            "bead" => Ok(Suite::Bead),
            "all" => Ok(Suite::All),
            other => Err(Error::InvalidConfig(format!(
                "unknown suite {other:?}; expected discrete, couplings, brownian, bead or all"
            ))),
        }
    }
}

impl Suite {
    pub fn criteria(self) -> Vec<u32> {
        match self {
            Suite::Discrete => vec![1, 2, 3],
            Suite::Couplings => vec![4, 5, 6],
            Suite::Brownian => vec![12, 13, 14],
            Suite::Bead => vec![7, 8, 9, 10, 11],
            Suite::All => (1..=14).collect(),
        }
    }
}

pub const TITLES: [&str; 14] = [
    "lattice interlacing kernels commute",
    "Perron eigenfunctions of the discrete kernels",
    "exact intertwining of the discrete couplings",
    "blocking involution and sandwich bounds; pushing sum identity",
    "periodic Skorohod solver against the fixed-point oracle",
    "coupled Y(1) has the q_r law",
    "determinant form of the interlacing weight",
    "product formula for bead path densities",
    "Fourier coefficients of f",
    "characters are eigenfunctions of m_q",
    "determinantal one- and two-point statistics",
    "interval reflection formulas agree",
    "two-particle Brownian coupling marginal",
    "time reversal of reflected Brownian motion",
];

/// Runs one criterion.
pub fn run_criterion(id: u32, scale: Scale, seed: u64) -> CriterionReport {
    let seed = rng::derive(seed, id as u64);
    let result = match id {
        1 => commuting_kernels(),
        2 => perron_eigenfunctions(),
        3 => exact_intertwining(),
        4 => blocking_and_pushing(scale, seed),
        5 => skorohod_oracle(scale, seed),
        6 => coupling_marginal(scale, seed),
        7 => determinant_weight(scale, seed),
        8 => product_formula(seed),
        9 => fourier_identity(),
        10 => character_eigenvalues(),
        11 => correlations(scale, seed),
        12 => interval_reflection(scale, seed),
        13 => brownian_coupling(scale, seed),
        14 => time_reversal(scale, seed),
        _ => Err(Error::InvalidConfig(format!("no criterion {id}"))),
    };
    let title = TITLES.get(id as usize - 1).copied().unwrap_or("unknown");
    match result {
        Ok(checks) => CriterionReport {
            id,
            title,
            checks,
            error: None,
        },
        Err(e) => CriterionReport {
            id,
            title,
            checks: Vec::new(),
            error: Some(e.to_string()),
        },
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SuiteReport {
    pub suite: Suite,
    pub seed: u64,
    pub criteria: Vec<CriterionReport>,
}

impl SuiteReport {
    pub fn passed(&self) -> bool {
        self.criteria.iter().all(CriterionReport::passed)
    }

    pub fn to_text(&self) -> String {
        let mut out = format!("# suite={:?} seed={}\n", self.suite, self.seed).to_lowercase();
        for c in &self.criteria {
            out.push_str(&c.to_text());
        }
        let failed = self.criteria.iter().filter(|c| !c.passed()).count();
        let _ = writeln!(out, "summary passed={} failed={}", self.criteria.len() - failed, failed);
        out
    }
}

pub fn run_suite(suite: Suite, scale: Scale, seed: u64) -> SuiteReport {
    SuiteReport {
        suite,
        seed,
        criteria: suite
            .criteria()
            .into_iter()
            .map(|id| run_criterion(id, scale, seed))
            .collect(),
    }
}

fn commuting_kernels() -> Result<Vec<Check>> {
    let mut out = Vec::new();
    for n in 2..=3 {
        for m in 4..=8usize {
            let ks = (1..m as i64)
                .map(|r| lattice_interlace_kernel(n, m, r).map(|k| k.1))
                .collect::<Result<Vec<_>>>()?;
            let mut mismatched = 0usize;
            for (i, a) in ks.iter().enumerate() {
                for b in &ks[i + 1..] {
                    let (ab, ba) = (a.matmul(b), b.matmul(a));
                    mismatched += (0..ab.dim())
                        .flat_map(|i| (0..ab.dim()).map(move |j| (i, j)))
                        .filter(|&(i, j)| ab.get(i, j) != ba.get(i, j))
                        .count();
                }
            }
            out.push(Check::at_most(
                format!("mismatched_entries_n{n}_N{m}"),
                mismatched as f64,
                0.0,
            ));
        }
    }
    Ok(out)
}

/// `Δ` from complex exponentials, independent of the library's chord product.
fn delta_exp(x: &DiscreteConfig) -> f64 {
    let m = x.modulus() as f64;
    let z: Vec<Complex64> = x
        .sites()
        .iter()
        .map(|&k| Complex64::from_polar(1.0, TAU * k as f64 / m))
        .collect();
    let mut p = 1.0;
    for i in 0..z.len() {
        for j in i + 1..z.len() {
            p *= (z[i] - z[j]).norm();
        }
    }
    p
}

fn perron_eigenfunctions() -> Result<Vec<Check>> {
    let tol = 1e-10;
    let mut out = Vec::new();
    for n in 2..=3 {
        for m in (n + 2)..=8 {
            out.push(Check::at_most(
                format!("delta_up_n{n}_N{m}"),
                perron_check_delta(n, m)?.residual,
                tol,
            ));
            let mk = m_kernel(n, m)?;
            out.push(Check::at_most(
                format!("delta_interlace_n{n}_N{m}"),
                mk.left_residual.max(mk.right_residual),
                tol,
            ));
            let worst = (1..m as i64)
                .map(|r| lattice_q_kernel(n, m, r).map(|q| q.residual))
                .collect::<Result<Vec<_>>>()?;
            out.push(Check::at_most(
                format!("h_lattice_n{n}_N{m}"),
                worst.into_iter().fold(0.0, f64::max),
                tol,
            ));
        }
    }
    let states = circle_states(2, 4)?;
    let brute = states.states().iter().fold(0.0f64, |m, x| {
        let s: f64 = up_moves(x).iter().map(delta_exp).sum();
        m.max((s / delta_exp(x) - SQRT_2).abs())
    });
    out.push(Check::at_most("brute_force_ratio_n2_N4", brute, 1e-12));
    out.push(Check::at_most(
        "eigenvalue_n2_N4",
        (perron_check_delta(2, 4)?.eigenvalue - SQRT_2).abs(),
        1e-12,
    ));
    Ok(out)
}

fn exact_intertwining() -> Result<Vec<Check>> {
    let tol = 1e-12;
    let mut out = Vec::new();
    for (x, h) in [
        (vec![0i64], 4usize),
        (vec![0, 1], 4),
        (vec![0, 2], 4),
        (vec![0, 1, 3], 3),
    ] {
        out.push(Check::at_most(
            format!("line_{x:?}_T{h}").replace(' ', ""),
            verify_prop_rsk(&x, h).max_tv(),
            tol,
        ));
    }
    for (sites, m, h) in [
        (vec![0usize], 3usize, 4usize),
        (vec![0, 1], 4, 4),
        (vec![0, 2], 5, 4),
        (vec![0, 1, 3], 6, 3),
    ] {
        let y0 = DiscreteConfig::new(sites.clone(), m)?;
        out.push(Check::at_most(
            format!("circle_{sites:?}_N{m}_T{h}").replace(' ', ""),
            verify_prop_crsk(&y0, h)?.max_tv(),
            tol,
        ));
    }
    Ok(out)
}

fn random_alcove<R: Rng + ?Sized>(n: usize, rng: &mut R) -> AlcovePoint {
    let mut u: Vec<f64> = (0..n).map(|_| rng.random::<f64>() * TAU).collect();
    u.sort_by(f64::total_cmp);
    AlcovePoint::circle(u).expect("sorted angles")
}

/// Each point of `x` uniform in its arc `[x_i, x_{i+1}]`.
fn random_successor<R: Rng + ?Sized>(x: &AlcovePoint, rng: &mut R) -> AlcovePoint {
    let n = x.n() as isize;
    let y = (1..=n)
        .map(|i| x.at(i) + rng.random::<f64>() * (x.at(i + 1) - x.at(i)))
        .collect();
    AlcovePoint::new(y, x.period()).expect("successor stays in the alcove")
}

/// `(u, v, x)` with `u ≼_s x ≼_r v` and `r < s`.
fn random_triple<R: Rng + ?Sized>(n: usize, rng: &mut R) -> (AlcovePoint, AlcovePoint, AlcovePoint) {
    loop {
        let u = random_alcove(n, rng);
        let x = random_successor(&u, rng);
        let v = random_successor(&x, rng);
        if x.sum() - u.sum() > v.sum() - x.sum() {
            return (u, v, x);
        }
    }
}

fn blocking_and_pushing(scale: Scale, seed: u64) -> Result<Vec<Check>> {
    let triples = scale.pick(2_000, 10_000);
    let mut out = Vec::new();
    for n in 2..=5 {
        let residuals = rng::par_replicas(rng::derive(seed, n as u64), triples, |_, g| -> Result<[f64; 3]> {
            let (u, v, x) = random_triple(n, g);
            let inv = psi_involution_residual(&u, &v, &x)?;
            let y = psi_map(&u, &v, &x)?;
            let mut sandwich = 0.0f64;
            for i in 1..=n as isize {
                let lo = u.at(i).max(v.at(i - 1));
                let hi = u.at(i + 1).min(v.at(i));
                sandwich = sandwich.max((lo - y.at(i)).max(y.at(i) - x.at(i)).max(x.at(i) - hi));
            }
            let p = phi_map(&u, &v, &x)?;
            let size = 1.0 + u.sum().abs() + v.sum().abs();
            Ok([inv, sandwich, (p.sum() - (u.sum() + v.sum() - x.sum())).abs() / size])
        })?;
        let worst = |k: usize| residuals.iter().fold(0.0f64, |m, r| m.max(r[k]));
        out.push(Check::at_most(format!("psi_involution_n{n}"), worst(0), 1e-10));
        out.push(Check::at_most(format!("psi_sandwich_n{n}"), worst(1), 1e-10));
        out.push(Check::at_most(format!("phi_sum_identity_n{n}"), worst(2), 1e-12));
    }
    Ok(out)
}

/// `r_i = max(0, max_k Σ_{j=i−k}^{i−1} z_j)`, `l_{i+1} = r_{i+1} − r_i − z_i`.
fn loynes(z: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let n = z.len();
    let r: Vec<f64> = (0..n)
        .map(|i| {
            let mut best = 0.0f64;
            let mut acc = 0.0;
            for k in 1..n {
                acc += z[(i + n - k) % n];
                best = best.max(acc);
            }
            best
        })
        .collect();
    let mut l = vec![0.0; n];
    for i in 0..n {
        l[(i + 1) % n] = r[(i + 1) % n] - r[i] - z[i];
    }
    (r, l)
}

fn skorohod_oracle(scale: Scale, seed: u64) -> Result<Vec<Check>> {
    let inputs = scale.pick(2_000, 10_000);
    let mut g = rng::master(seed);
    let mut worst = 0.0f64;
    for _ in 0..inputs {
        let n = 1 + (g.random::<u32>() % 8) as usize;
        let mut z: Vec<f64> = (0..n).map(|_| 6.0 * g.random::<f64>() - 3.0).collect();
        let mean = z.iter().sum::<f64>() / n as f64;
        let shift = 0.01 + 2.0 * g.random::<f64>();
        z.iter_mut().for_each(|v| *v -= mean + shift);
        let s = periodic_skorohod(&z)?;
        let (r, l) = loynes(&z);
        for i in 0..n {
            worst = worst.max((s.r[i] - r[i]).abs()).max((s.l[i] - l[i]).abs());
        }
    }
    let s = periodic_skorohod(&[-1.0, -1.0])?;
    let exact = s.r == vec![0.0, 0.0] && s.l == vec![1.0, 1.0];
    Ok(vec![
        Check::at_most("max_deviation_from_oracle", worst, 1e-10),
        Check::at_most("worked_example_mismatch", if exact { 0.0 } else { 1.0 }, 0.0),
    ])
}

fn coupling_marginal(scale: Scale, seed: u64) -> Result<Vec<Check>> {
    let replicas = scale.pick(20_000, 100_000);
    let y0 = AlcovePoint::circle(vec![0.3, 2.5])?;
    let (r, s) = (1.0, 2.0);
    let direct = rng::par_replicas(rng::derive(seed, 0), replicas, |_, g| {
        sample_q_r(&y0, r, g, DEFAULT_ATTEMPTS).map(|y| y.coords()[0])
    })?;
    let mut out = Vec::new();
    for (k, (kind, name)) in [(CouplingKind::Push, "push"), (CouplingKind::Block, "block")]
        .into_iter()
        .enumerate()
    {
        let coupled = rng::par_replicas(rng::derive(seed, 1 + k as u64), replicas, |_, g| {
            run_coupling(kind, &y0, r, s, 1, g).map(|run| run.y[1].coords()[0])
        })?;
        let t = energy_test_1d(
            &coupled,
            &direct,
            199,
            &mut rng::master(rng::derive(seed, 10 + k as u64)),
        );
        out.push(Check::at_least(format!("{name}_energy_p_value"), t.p_value, 0.01));
    }
    Ok(out)
}

fn random_circle<R: Rng + ?Sized>(n: usize, rng: &mut R) -> CircleConfig {
    CircleConfig::from_angles((0..n).map(|_| rng.random::<f64>() * TAU)).expect("finite angles")
}

fn determinant_weight(scale: Scale, seed: u64) -> Result<Vec<Check>> {
    let pairs = scale.pick(2_000, 10_000);
    let mut g = rng::master(seed);
    let mut out = Vec::new();
    let mut zeros = 0usize;
    let mut worst = 0.0f64;
    let mut worst_zero = 0.0f64;
    let cases: Vec<(usize, f64)> = [2usize, 3, 4]
        .iter()
        .flat_map(|&n| [0.5, 2.0].map(|q| (n, q)))
        .collect();
    for i in 0..pairs {
        let (n, q) = cases[i % cases.len()];
        let p = BeadParams::new(n, q)?;
        let y = random_circle(n, &mut g);
        // Half the pairs are interlaced by construction, the rest mostly not.
        let z = if i % 2 == 0 {
            sample_mq(&y, &p, &mut g)?
        } else {
            random_circle(n, &mut g)
        };
        let w = iq_weight(&y, &z, q);
        let d = iq_det_formula(&y, &z, &p)?;
        let err = (d - Complex64::new(w, 0.0)).norm();
        worst = worst.max(err);
        if weak_interlace(&y, &z) == WeakInterlace::Neither {
            zeros += 1;
            worst_zero = worst_zero.max(err);
        }
    }
    out.push(Check::at_most("max_abs_error", worst, 1e-10));
    out.push(Check::at_most("max_abs_error_non_interlaced", worst_zero, 1e-10));
    out.push(Check::at_least(
        "non_interlaced_pairs",
        zeros as f64,
        (pairs / 10) as f64,
    ));
    Ok(out)
}

fn product_formula(seed: u64) -> Result<Vec<Check>> {
    let mut g = rng::master(seed);
    let mut out = Vec::new();
    for n in 1..=3 {
        for q in [0.5, 2.0] {
            let p = BeadParams::new(n, q)?;
            let mut rel = 0.0f64;
            let mut vdm = 0.0f64;
            for m in 2..=4 {
                for _ in 0..25 {
                    let path = sample_bead_path(&p, m, &mut g)?;
                    let c = alpha_m_density_check(&path, &p)?;
                    rel = rel.max(c.relative_error);
                    vdm = vdm.max(c.vandermonde_residual);
                }
            }
            out.push(Check::at_most(format!("relative_error_n{n}_q{q}"), rel, 1e-9));
            out.push(Check::at_most(
                format!("vandermonde_factorisation_n{n}_q{q}"),
                vdm,
                1e-9,
            ));
        }
    }
    Ok(out)
}

fn fourier_identity() -> Result<Vec<Check>> {
    let mut out = Vec::new();
    for n in 1..=3 {
        for q in [0.5, 2.0] {
            let p = BeadParams::new(n, q)?;
            let mut worst = 0.0f64;
            for k in -5..=5i64 {
                let v = integrate_complex_with_breaks(
                    |u| bead::f_func(u, &p).expect("f defined for q ≠ 1") * Complex64::from_polar(1.0, -u * k as f64),
                    0.0,
                    TAU,
                    &[],
                    QuadOptions::with_tol(0.0, 1e-12),
                )?
                .value;
                let expect = 1.0 / g_k(k, &p);
                worst = worst.max((v - expect).norm() / expect.norm());
            }
            out.push(Check::at_most(format!("relative_error_n{n}_q{q}"), worst, 1e-8));
        }
    }
    Ok(out)
}

fn character_eigenvalues() -> Result<Vec<Check>> {
    let mut out = Vec::new();
    let points1 = [
        CircleConfig::new(vec![0.3])?,
        CircleConfig::new(vec![2.0])?,
        CircleConfig::new(vec![5.1])?,
    ];
    let points2 = [
        CircleConfig::new(vec![0.2, 1.1])?,
        CircleConfig::new(vec![0.5, 4.0])?,
        CircleConfig::new(vec![2.0, 5.9])?,
        CircleConfig::new(vec![3.0, 3.5])?,
    ];
    for q in [0.5, 2.0] {
        let p1 = BeadParams::new(1, q)?;
        for l in [0i64, 1] {
            let rep = verify_prop_br(&SignatureLabel::new(vec![l])?, &p1, &points1)?;
            out.push(Check::at_most(
                format!("n1_q{q}_lambda({l})"),
                rep.max_relative_deviation,
                1e-6,
            ));
        }
        let p2 = BeadParams::new(2, q)?;
        for lambda in [vec![0, 0], vec![1, 0], vec![1, 1]] {
            let name = format!("n2_q{q}_lambda({},{})", lambda[0], lambda[1]);
            let rep = verify_prop_br(&SignatureLabel::new(lambda)?, &p2, &points2)?;
            out.push(Check::at_most(name, rep.max_relative_deviation, 1e-6));
        }
    }
    Ok(out)
}

fn correlations(scale: Scale, seed: u64) -> Result<Vec<Check>> {
    let samples = scale.pick(20_000, 100_000);
    let mut out = Vec::new();
    for (k, q) in [1.0, 2.0].into_iter().enumerate() {
        let p = BeadParams::new(2, q)?;
        let rep = correlation_mc_check(&p, 2, samples, rng::derive(seed, k as u64))?;
        out.push(Check::at_most(
            format!("one_point_max_abs_z_q{q}"),
            rep.one_point_max_z(),
            3.0,
        ));
        out.push(Check::at_least(
            format!("two_point_fraction_within_3se_q{q}"),
            rep.two_point_fraction_within(3.0),
            0.95,
        ));
    }
    Ok(out)
}

fn interval_reflection(scale: Scale, seed: u64) -> Result<Vec<Check>> {
    let drivers = scale.pick(200, 1_000);
    let mut g = rng::master(seed);
    let mut worst = 0.0f64;
    for _ in 0..drivers {
        let len = 2 + (g.random::<u32>() % 200) as usize;
        let a = 0.2 + 2.0 * g.random::<f64>();
        let mut f = vec![a * g.random::<f64>()];
        for _ in 1..len {
            let last = *f.last().expect("non-empty");
            f.push(last + a * (2.0 * g.random::<f64>() - 1.0));
        }
        worst = worst.max(interval_reflection_formulas(&f, a)?.max_disagreement());
    }
    Ok(vec![Check::at_most("max_disagreement", worst, 1e-9)])
}

fn brownian_coupling(scale: Scale, seed: u64) -> Result<Vec<Check>> {
    let replicas = scale.pick(5_000, 100_000);
    let horizon = 1.0;
    let c = IntervalCoupling {
        p: PI,
        a: 2.0,
        y: 0.5,
        horizon,
        dt: 1e-3,
    };
    let rep = verify_n2_coupling(&c, replicas, rng::derive(seed, 0))?;
    let free = IntervalCoupling {
        p: 50.0 * horizon.sqrt(),
        a: 1.0,
        y: 0.0,
        horizon,
        dt: 1e-3,
    };
    let rep_free = verify_n2_coupling(&free, replicas, rng::derive(seed, 1))?;
    Ok(vec![
        Check::at_least("ks_p_value_conditioned_p_pi", rep.ks.p_value, 0.01),
        Check::at_most("start_error_p_pi", rep.start_error, 1e-12),
        Check::at_least("ks_p_value_free_limit_p50", rep_free.ks_free.p_value, 0.01),
    ])
}

fn time_reversal(scale: Scale, seed: u64) -> Result<Vec<Check>> {
    let replicas = scale.pick(4_000, 20_000);
    let rep = verify_time_reversal(2, PI, 1.0, 1e-3, replicas, seed)?;
    let mut out: Vec<Check> = rep
        .stats
        .iter()
        .map(|s| Check::at_most(format!("abs_z_{}", s.name.replace(' ', "_")), s.z_score().abs(), 3.0))
        .collect();
    out.push(Check::at_least(
        "kept_replicas",
        rep.kept as f64,
        (replicas / 10) as f64,
    ));
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn suite_names_parse() {
        assert_eq!("bead".parse::<Suite>().unwrap(), Suite::Bead);
        assert!("nope".parse::<Suite>().is_err());
        assert_eq!(Suite::All.criteria().len(), 14);
    }

    #[test]
    fn check_bounds() {
        assert!(Check::at_most("a", 1.0, 1.0).passed());
        assert!(!Check::at_most("a", f64::NAN, 1.0).passed());
        assert!(Check::at_least("a", 0.5, 0.01).passed());
        assert!(!Check::at_least("a", f64::NAN, 0.01).passed());
    }

    #[test]
    fn loynes_matches_worked_example() {
        let (r, l) = loynes(&[-1.0, -1.0]);
        assert_eq!(r, vec![0.0, 0.0]);
        assert_eq!(l, vec![1.0, 1.0]);
    }

    #[test]
    fn unknown_criterion_fails() {
        let rep = run_criterion(99, Scale::Quick, 1);
        assert!(!rep.passed());
        assert!(rep.to_text().contains("status=FAIL"));
    }

    #[test]
    fn discrete_report_is_deterministic() {
        let a = run_criterion(5, Scale::Quick, 3).to_text();
        let b = run_criterion(5, Scale::Quick, 3).to_text();
        assert_eq!(a, b);
        assert!(a.starts_with("criterion=5 status=PASS"));
    }
}
