//! Exact finite-state models on the discrete circle `Z_N` and on the lattice
//! alcove: kernels, Perron eigenfunctions, the interlaced coupling and the
//! lattice coupling maps.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt::Display;
use std::hash::Hash;

use rand::Rng;

use crate::config::{discrete_delta, discrete_h, DiscreteConfig, LatticePoint};
use crate::error::{Error, Result};
use crate::gt_line::IntertwiningReport;
use crate::interlace::{in_tau, phi_coords, psi_coords};
use crate::matrix::DenseMatrix;
use crate::rng;

/// Largest modulus accepted for exhaustive enumeration.
pub const MAX_MODULUS: usize = 12;

/// Tolerance on eigen-ratio constancy.
pub const EIGEN_TOL: f64 = 1e-10;

#[derive(Debug, Clone)]
pub struct StateIndex<S> {
    states: Vec<S>,
    lookup: HashMap<S, usize>,
}

impl<S: Clone + Eq + Hash> StateIndex<S> {
    pub fn new(states: Vec<S>) -> Self {
        let lookup = states.iter().cloned().enumerate().map(|(i, s)| (s, i)).collect();
        Self { states, lookup }
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn state(&self, i: usize) -> &S {
        &self.states[i]
    }

    pub fn states(&self) -> &[S] {
        &self.states
    }

    pub fn index_of(&self, s: &S) -> Option<usize> {
        self.lookup.get(s).copied()
    }
}

fn check_size(n: usize, modulus: usize) -> Result<()> {
    if n == 0 || n > modulus || modulus > MAX_MODULUS {
        return Err(Error::Precondition(format!(
            "need 1 ≤ n ≤ N ≤ {MAX_MODULUS}, got n={n} N={modulus}"
        )));
    }
    Ok(())
}

/// `n`-subsets of `Z_N` in lexicographic order.
pub fn circle_states(n: usize, modulus: usize) -> Result<StateIndex<DiscreteConfig>> {
    check_size(n, modulus)?;
    let mut out = Vec::new();
    let mut cur = Vec::with_capacity(n);
    fn rec(cur: &mut Vec<usize>, start: usize, n: usize, m: usize, out: &mut Vec<DiscreteConfig>) {
        if cur.len() == n {
            out.push(DiscreteConfig::new(cur.clone(), m).expect("valid subset"));
            return;
        }
        for v in start..m {
            cur.push(v);
            rec(cur, v + 1, n, m, out);
            cur.pop();
        }
    }
    rec(&mut cur, 0, n, modulus, &mut out);
    Ok(StateIndex::new(out))
}

/// Lattice alcove points, one canonical representative each (sorted residues).
pub fn lattice_states(n: usize, modulus: usize) -> Result<StateIndex<LatticePoint>> {
    if n == 0 || modulus == 0 || modulus > MAX_MODULUS {
        return Err(Error::Precondition(format!("need n ≥ 1 and 1 ≤ N ≤ {MAX_MODULUS}")));
    }
    let mut out = Vec::new();
    let mut cur = Vec::with_capacity(n);
    fn rec(cur: &mut Vec<i64>, start: i64, n: usize, m: i64, out: &mut Vec<LatticePoint>) {
        if cur.len() == n {
            out.push(LatticePoint::new(cur.clone(), m as usize).expect("sorted residues"));
            return;
        }
        for v in start..m {
            cur.push(v);
            rec(cur, v, n, m, out);
            cur.pop();
        }
    }
    rec(&mut cur, 0, n, modulus as i64, &mut out);
    Ok(StateIndex::new(out))
}

/// Configurations reached by moving one particle one site anticlockwise
/// onto a vacant site.
pub fn up_moves(x: &DiscreteConfig) -> Vec<DiscreteConfig> {
    let m = x.modulus();
    x.sites()
        .iter()
        .filter(|&&k| !x.contains((k + 1) % m))
        .map(|&k| {
            let sites = x
                .sites()
                .iter()
                .map(|&s| if s == k { ((k + 1) % m) as i64 } else { s as i64 });
            DiscreteConfig::from_sites(sites, m).expect("vacant target")
        })
        .collect()
}

/// 0/1 matrix of `x ↗ y`.
pub fn up_kernel(n: usize, modulus: usize) -> Result<(StateIndex<DiscreteConfig>, DenseMatrix<i64>)> {
    let idx = circle_states(n, modulus)?;
    let mut m = DenseMatrix::zeros(idx.len());
    for (i, x) in idx.states().iter().enumerate() {
        for y in up_moves(x) {
            m.set(i, idx.index_of(&y).expect("enumerated"), 1);
        }
    }
    Ok((idx, m))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EigenCheck {
    pub eigenvalue: f64,
    /// Largest relative deviation of the state-wise ratio from the eigenvalue.
    pub residual: f64,
}

/// Ratios `(A v)_i / v_i` for positive `v`.
pub fn eigen_ratio(a: &DenseMatrix<f64>, v: &[f64]) -> EigenCheck {
    let av = a.apply(v);
    let ratios: Vec<f64> = av.iter().zip(v).map(|(x, y)| x / y).collect();
    let lambda = ratios.iter().sum::<f64>() / ratios.len() as f64;
    let residual = ratios.iter().fold(0.0f64, |m, r| m.max((r - lambda).abs())) / lambda.abs().max(f64::MIN_POSITIVE);
    EigenCheck {
        eigenvalue: lambda,
        residual,
    }
}

fn require(check: EigenCheck, what: &str) -> Result<EigenCheck> {
    if check.residual > EIGEN_TOL || !check.residual.is_finite() {
        return Err(Error::Eigen {
            what: what.into(),
            residual: check.residual,
            tolerance: EIGEN_TOL,
        });
    }
    Ok(check)
}

fn deltas(idx: &StateIndex<DiscreteConfig>) -> Vec<f64> {
    idx.states().iter().map(discrete_delta).collect()
}

/// `Σ_{x↗y} Δ(y) = λ Δ(x)`.
pub fn perron_check_delta(n: usize, modulus: usize) -> Result<EigenCheck> {
    if n >= modulus {
        return Err(Error::Precondition(format!("need n < N, got n={n} N={modulus}")));
    }
    let (idx, up) = up_kernel(n, modulus)?;
    require(
        eigen_ratio(&DenseMatrix::from_int(&up), &deltas(&idx)),
        "Δ under one-step moves",
    )
}

/// Circular interlacing `x ⪯ y`: every arc `(k_j, k_{j+1}]` between
/// consecutive `x` sites holds exactly one `y` site.
pub fn circle_interlaced(x: &DiscreteConfig, y: &DiscreteConfig) -> bool {
    let m = x.modulus();
    if y.modulus() != m || y.n() != x.n() {
        return false;
    }
    let k = x.sites();
    let n = k.len();
    (0..n).all(|j| {
        let start = k[j];
        let len = if n == 1 { m } else { (k[(j + 1) % n] + m - start) % m };
        let len = if len == 0 { m } else { len };
        y.sites()
            .iter()
            .filter(|&&l| {
                // Offset in 1..=N; the site k_j itself counts as k_j + N.
                let d = (l + m - start - 1) % m + 1;
                d <= len
            })
            .count()
            == 1
    })
}

/// 0/1 matrix with entry `(x, y) = 1_{x ⪯ y}`.
pub fn interlace_matrix(n: usize, modulus: usize) -> Result<(StateIndex<DiscreteConfig>, DenseMatrix<i64>)> {
    let idx = circle_states(n, modulus)?;
    let mut m = DenseMatrix::zeros(idx.len());
    for (i, x) in idx.states().iter().enumerate() {
        for (j, y) in idx.states().iter().enumerate() {
            if circle_interlaced(x, y) {
                m.set(i, j, 1);
            }
        }
    }
    Ok((idx, m))
}

#[derive(Debug, Clone)]
pub struct StochasticKernel<S> {
    pub index: StateIndex<S>,
    pub matrix: DenseMatrix<f64>,
    pub eigenvalue: f64,
    pub residual: f64,
}

fn doob(structure: &DenseMatrix<f64>, h: &[f64], lambda: f64) -> DenseMatrix<f64> {
    let n = structure.dim();
    let mut out = DenseMatrix::zeros(n);
    for i in 0..n {
        for j in 0..n {
            let a = structure.get(i, j);
            if a != 0.0 {
                out.set(i, j, a * h[j] / (lambda * h[i]));
            }
        }
    }
    out
}

/// `Q(x, y) = Δ(y) / (λ Δ(x))` on `x ↗ y`.
pub fn q_kernel(n: usize, modulus: usize) -> Result<StochasticKernel<DiscreteConfig>> {
    let ev = perron_check_delta(n, modulus)?;
    let (idx, up) = up_kernel(n, modulus)?;
    let matrix = doob(&DenseMatrix::from_int(&up), &deltas(&idx), ev.eigenvalue);
    Ok(StochasticKernel {
        index: idx,
        matrix,
        eigenvalue: ev.eigenvalue,
        residual: ev.residual,
    })
}

#[derive(Debug, Clone)]
pub struct MKernel {
    pub kernel: StochasticKernel<DiscreteConfig>,
    /// `γ` with `Σ_{x⪯y} Δ(x) = γ Δ(y)`.
    pub gamma: f64,
    /// Residual of `Δ` as a left eigenvector of `1_{x⪯y}`.
    pub left_residual: f64,
    /// Residual of `Δ` as a right eigenvector of `1_{x⪯y}`.
    pub right_residual: f64,
}

/// `M(y, x) = Δ(x) / (γ Δ(y)) 1_{x⪯y}`, rows indexed by `y`.
pub fn m_kernel(n: usize, modulus: usize) -> Result<MKernel> {
    if n >= modulus {
        return Err(Error::Precondition(format!("need n < N, got n={n} N={modulus}")));
    }
    let (idx, inter) = interlace_matrix(n, modulus)?;
    let d = deltas(&idx);
    let by_y = DenseMatrix::from_int(&inter.transpose());
    let left = require(eigen_ratio(&by_y, &d), "Δ as left eigenvector of interlacing")?;
    let right = require(
        eigen_ratio(&DenseMatrix::from_int(&inter), &d),
        "Δ as right eigenvector of interlacing",
    )?;
    let matrix = doob(&by_y, &d, left.eigenvalue);
    Ok(MKernel {
        kernel: StochasticKernel {
            index: idx,
            matrix,
            eigenvalue: left.eigenvalue,
            residual: left.residual,
        },
        gamma: left.eigenvalue,
        left_residual: left.residual,
        right_residual: right.residual,
    })
}

/// Moves `y` along with the step `x → x_next`: starting just after the site
/// of the moved `x` particle, the first `y` particle met anticlockwise that can
/// step forward while keeping `x_next ⪯ y′` moves.
pub fn coupled_step(x: &DiscreteConfig, y: &DiscreteConfig, x_next: &DiscreteConfig) -> Result<DiscreteConfig> {
    if !circle_interlaced(x, y) {
        return Err(Error::NotInterlaced(format!("{:?} vs {:?}", x.sites(), y.sites())));
    }
    let m = x.modulus();
    let moved: Vec<usize> = x.sites().iter().copied().filter(|s| !x_next.contains(*s)).collect();
    if moved.len() != 1 || !up_moves(x).contains(x_next) {
        return Err(Error::Precondition(format!(
            "{:?} is not a one-step move of {:?}",
            x_next.sites(),
            x.sites()
        )));
    }
    let p = moved[0];
    for off in 1..=m {
        let site = (p + off) % m;
        if !y.contains(site) || y.contains((site + 1) % m) {
            continue;
        }
        let sites = y
            .sites()
            .iter()
            .map(|&s| if s == site { ((s + 1) % m) as i64 } else { s as i64 });
        let cand = DiscreteConfig::from_sites(sites, m)?;
        if circle_interlaced(x_next, &cand) {
            return Ok(cand);
        }
    }
    Err(Error::Precondition(
        "no y particle can move; interlacing was broken".into(),
    ))
}

/// Exact propagation of the coupled pair started from `(X(0) ~ M(y0, ·), y0)`.
/// Compares the law of the `Y` path with the `Q` chain and the conditional law
/// of `X(T)` given the `Y` path with `M(Y(T), ·)` at every `T ≤ horizon`.
pub fn verify_prop_crsk(y0: &DiscreteConfig, horizon: usize) -> Result<IntertwiningReport> {
    let (n, modulus) = (y0.n(), y0.modulus());
    let q = q_kernel(n, modulus)?;
    let mk = m_kernel(n, modulus)?;
    let idx = &q.index;
    let yi = idx.index_of(y0).expect("enumerated");
    let mut dist: BTreeMap<(Vec<usize>, usize), f64> = BTreeMap::new();
    for xi in 0..idx.len() {
        let w = mk.kernel.matrix.get(yi, xi);
        if w > 0.0 {
            dist.insert((vec![yi], xi), w);
        }
    }
    let mut report = IntertwiningReport {
        marginal_tv: 0.0,
        conditional_tv: 0.0,
        paths: 0,
    };
    for t in 0..=horizon {
        if t > 0 {
            let mut next = BTreeMap::new();
            for ((path, xi), w) in &dist {
                let y = idx.state(*path.last().expect("nonempty"));
                let x = idx.state(*xi);
                for xn in 0..idx.len() {
                    let p = q.matrix.get(*xi, xn);
                    if p == 0.0 {
                        continue;
                    }
                    let yn = coupled_step(x, y, idx.state(xn))?;
                    let mut np = path.clone();
                    np.push(idx.index_of(&yn).expect("enumerated"));
                    *next.entry((np, xn)).or_insert(0.0) += w * p;
                }
            }
            dist = next;
        }
        let mut by_path: BTreeMap<&Vec<usize>, Vec<(usize, f64)>> = BTreeMap::new();
        for ((path, xi), w) in &dist {
            by_path.entry(path).or_default().push((*xi, *w));
        }
        let mut marginal = 0.0;
        for (path, xs) in &by_path {
            let mass: f64 = xs.iter().map(|p| p.1).sum();
            let chain: f64 = path.windows(2).map(|w| q.matrix.get(w[0], w[1])).product();
            marginal += (mass - chain).abs();
            let last = *path.last().expect("nonempty");
            let mut cond: HashMap<usize, f64> = xs.iter().map(|&(x, w)| (x, w / mass)).collect();
            let mut tv = 0.0;
            for xi in 0..idx.len() {
                let target = mk.kernel.matrix.get(last, xi);
                tv += (cond.remove(&xi).unwrap_or(0.0) - target).abs();
            }
            report.conditional_tv = report.conditional_tv.max(0.5 * tv);
        }
        report.marginal_tv = report.marginal_tv.max(0.5 * marginal);
        report.paths = by_path.len();
    }
    Ok(report)
}

/// Integer lifts `x′` with `x′_i ∈ [x_i, x_{i+1}]` and `Σ (x′ − x) = r`.
pub fn lattice_successor_lifts(x: &[i64], modulus: usize, r: i64) -> Vec<Vec<i64>> {
    let n = x.len();
    let m = modulus as i64;
    let hi: Vec<i64> = (0..n).map(|i| if i + 1 < n { x[i + 1] } else { x[0] + m }).collect();
    let widths: Vec<i64> = (0..n).map(|i| hi[i] - x[i]).collect();
    // Suffix capacity for pruning.
    let mut cap = vec![0i64; n + 1];
    for i in (0..n).rev() {
        cap[i] = cap[i + 1] + widths[i];
    }
    let mut out = Vec::new();
    let mut t = vec![0i64; n];
    fn rec(i: usize, left: i64, w: &[i64], cap: &[i64], t: &mut Vec<i64>, x: &[i64], out: &mut Vec<Vec<i64>>) {
        if i == w.len() {
            if left == 0 {
                out.push(x.iter().zip(t.iter()).map(|(a, b)| a + b).collect());
            }
            return;
        }
        if left < 0 || left > cap[i] {
            return;
        }
        for v in 0..=w[i].min(left) {
            t[i] = v;
            rec(i + 1, left - v, w, cap, t, x, out);
        }
        t[i] = 0;
    }
    rec(0, r, &widths, &cap, &mut t, x, &mut out);
    out
}

fn check_step(modulus: usize, r: i64) -> Result<()> {
    if r < 1 || r >= modulus as i64 {
        return Err(Error::Precondition(format!("lattice step must lie in 1..N-1, got {r}")));
    }
    Ok(())
}

/// 0/1 matrix of `x ≼_r x′` on the lattice alcove.
pub fn lattice_interlace_kernel(
    n: usize,
    modulus: usize,
    r: i64,
) -> Result<(StateIndex<LatticePoint>, DenseMatrix<i64>)> {
    check_step(modulus, r)?;
    let idx = lattice_states(n, modulus)?;
    let mut m = DenseMatrix::zeros(idx.len());
    for (i, x) in idx.states().iter().enumerate() {
        for lift in lattice_successor_lifts(x.coords(), modulus, r) {
            let c = LatticePoint::new(lift, modulus).expect("alcove successor").canonical();
            let j = idx.index_of(&c).expect("enumerated");
            m.set(i, j, m.get(i, j) + 1);
        }
    }
    Ok((idx, m))
}

/// `q^N_r(x, x′) = h^N(x′) l^N_r(x, x′) / (γ h^N(x))`, with the `h^N`
/// eigen-ratio verified constant.
pub fn lattice_q_kernel(n: usize, modulus: usize, r: i64) -> Result<StochasticKernel<LatticePoint>> {
    let (idx, l) = lattice_interlace_kernel(n, modulus, r)?;
    let h: Vec<f64> = idx.states().iter().map(discrete_h).collect();
    let lf = DenseMatrix::from_int(&l);
    let ev = require(eigen_ratio(&lf, &h), "h^N under lattice interlacing")?;
    Ok(StochasticKernel {
        matrix: doob(&lf, &h, ev.eigenvalue),
        index: idx,
        eigenvalue: ev.eigenvalue,
        residual: ev.residual,
    })
}

/// `x†_i = −x_{n+1−i}`.
pub fn lattice_dagger(x: &[i64]) -> Vec<i64> {
    x.iter().rev().map(|v| -v).collect()
}

/// Integer points `x` with `u ≼_s x ≼ v` (lifts fixed by `u` and `v`).
pub fn tau_lattice(u: &[i64], v: &[i64], modulus: usize, s: i64) -> Vec<Vec<i64>> {
    lattice_successor_lifts(u, modulus, s)
        .into_iter()
        .filter(|x| in_tau(u, v, x, modulus as i64, 0.0))
        .collect()
}

fn check_lattice_tau(u: &[i64], v: &[i64], x: &[i64], modulus: usize) -> Result<()> {
    if !in_tau(u, v, x, modulus as i64, 0.0) {
        return Err(Error::NotInterlaced(format!("{x:?} is not between {u:?} and {v:?}")));
    }
    Ok(())
}

pub fn lattice_phi(u: &[i64], v: &[i64], x: &[i64], modulus: usize) -> Result<Vec<i64>> {
    check_lattice_tau(u, v, x, modulus)?;
    Ok(phi_coords(u, v, x, modulus as i64))
}

pub fn lattice_psi(u: &[i64], v: &[i64], x: &[i64], modulus: usize) -> Result<Vec<i64>> {
    check_lattice_tau(u, v, x, modulus)?;
    let s: i64 = x.iter().sum::<i64>() - u.iter().sum::<i64>();
    let r: i64 = v.iter().sum::<i64>() - x.iter().sum::<i64>();
    if s <= r {
        return Err(Error::Precondition(format!("blocking needs s > r, got s={s} r={r}")));
    }
    psi_coords(u, v, x, modulus as i64)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct BijectionReport {
    /// Number of `(u, v)` pairs with nonempty `τ`.
    pub pairs: usize,
    /// Pairs where `|τ| ≠ |τ′|`.
    pub size_mismatches: usize,
    /// Pairs where `φ` is not a bijection `τ → τ′`.
    pub phi_failures: usize,
    /// Pairs where `ψ` is not a bijection `τ → τ′` (only when `s > r`).
    pub psi_failures: usize,
    /// Triples where `(u, x, v) ↦ (v†, ψ(x)†, u†)` is not an involution.
    pub involution_failures: usize,
}

impl BijectionReport {
    pub fn failures(&self) -> usize {
        self.size_mismatches + self.phi_failures + self.psi_failures + self.involution_failures
    }
}

/// Exhaustive check of the lattice maps over every `u` and every `v` reachable
/// by an `s`-step then an `r`-step.
pub fn lattice_bijection_check(n: usize, modulus: usize, r: i64, s: i64) -> Result<BijectionReport> {
    check_step(modulus, r)?;
    check_step(modulus, s)?;
    let idx = lattice_states(n, modulus)?;
    let mut rep = BijectionReport::default();
    for u in idx.states() {
        let u = u.coords().to_vec();
        let mut vs = BTreeSet::new();
        for x in lattice_successor_lifts(&u, modulus, s) {
            vs.extend(lattice_successor_lifts(&x, modulus, r));
        }
        for v in vs {
            let tau = tau_lattice(&u, &v, modulus, s);
            let tau_p: BTreeSet<Vec<i64>> = tau_lattice(&u, &v, modulus, r).into_iter().collect();
            rep.pairs += 1;
            if tau.len() != tau_p.len() {
                rep.size_mismatches += 1;
            }
            let phi_img: BTreeSet<Vec<i64>> = tau.iter().map(|x| phi_coords(&u, &v, x, modulus as i64)).collect();
            if phi_img != tau_p {
                rep.phi_failures += 1;
            }
            if s > r {
                let mut img = BTreeSet::new();
                for x in &tau {
                    let y = lattice_psi(&u, &v, x, modulus)?;
                    let (u2, x2, v2) = (lattice_dagger(&v), lattice_dagger(&y), lattice_dagger(&u));
                    let back = lattice_dagger(&lattice_psi(&u2, &v2, &x2, modulus)?);
                    if back != *x {
                        rep.involution_failures += 1;
                    }
                    img.insert(y);
                }
                if img != tau_p {
                    rep.psi_failures += 1;
                }
            }
        }
    }
    Ok(rep)
}

/// Draws a successor lift of `x` under `q^N_r`.
pub fn sample_lattice_step<R: Rng + ?Sized>(x: &[i64], modulus: usize, r: i64, rng: &mut R) -> Vec<i64> {
    let succ = lattice_successor_lifts(x, modulus, r);
    let w: Vec<f64> = succ
        .iter()
        .map(|y| discrete_h(&LatticePoint::new(y.clone(), modulus).expect("alcove successor")))
        .collect();
    let total: f64 = w.iter().sum();
    let mut u = rng.random::<f64>() * total;
    for (y, wi) in succ.iter().zip(&w) {
        if u < *wi {
            return y.clone();
        }
        u -= wi;
    }
    succ.last().expect("nonempty successor set").clone()
}

/// The packed configuration `(c, …, c)`: all walkers on consecutive sites.
pub fn packed(n: usize, c: i64) -> Vec<i64> {
    vec![c; n]
}

pub fn is_packed(x: &[i64]) -> bool {
    x.windows(2).all(|w| w[0] == w[1])
}

/// A finite strip of the doubly indexed field with unit steps in both
/// directions.
#[derive(Debug, Clone)]
pub struct Strip {
    pub modulus: usize,
    /// `cells[m][k] = X^{(m)}(k)`.
    pub cells: Vec<Vec<Vec<i64>>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct StripReport {
    pub levels: usize,
    pub steps: usize,
    pub packed_cells: usize,
    pub interlace_violations: usize,
    pub forced_violations: usize,
}

impl StripReport {
    pub fn ok(&self) -> bool {
        self.interlace_violations == 0 && self.forced_violations == 0
    }
}

fn unit_interlaced(a: &[i64], b: &[i64], modulus: usize) -> bool {
    lattice_successor_lifts(a, modulus, 1).iter().any(|x| x == b)
}

/// Builds `levels × steps` cells: level 0 starts packed, the initial column
/// and the top level are seeded unit-step walks, and the rest follows
/// `X^{(m)}(k+1) = φ_{X^{(m)}(k), X^{(m+1)}(k+1)}(X^{(m+1)}(k))` downward.
pub fn build_strip(n: usize, modulus: usize, levels: usize, steps: usize, seed: u64) -> Result<Strip> {
    check_size(n, modulus)?;
    if levels == 0 {
        return Err(Error::Precondition("need at least one level".into()));
    }
    let mut g = rng::master(seed);
    let mut cells = vec![vec![Vec::new(); steps + 1]; levels];
    cells[0][0] = packed(n, 0);
    for m in 1..levels {
        cells[m][0] = sample_lattice_step(&cells[m - 1][0], modulus, 1, &mut g);
    }
    let top = levels - 1;
    for k in 0..steps {
        cells[top][k + 1] = sample_lattice_step(&cells[top][k], modulus, 1, &mut g);
        for m in (0..top).rev() {
            cells[m][k + 1] = lattice_phi(&cells[m][k], &cells[m + 1][k + 1], &cells[m + 1][k], modulus)?;
        }
    }
    Ok(Strip { modulus, cells })
}

/// Checks the strip: unit interlacing along both directions, and every packed
/// cell advanced to its only successor.
pub fn check_strip(strip: &Strip) -> Result<StripReport> {
    let modulus = strip.modulus;
    let levels = strip.cells.len();
    let steps = strip.cells[0].len() - 1;
    let mut rep = StripReport {
        levels,
        steps,
        ..StripReport::default()
    };
    for m in 0..levels {
        for k in 0..=steps {
            let c = &strip.cells[m][k];
            if m + 1 < levels && !unit_interlaced(c, &strip.cells[m + 1][k], modulus) {
                rep.interlace_violations += 1;
            }
            if k < steps {
                let next = &strip.cells[m][k + 1];
                if !unit_interlaced(c, next, modulus) {
                    rep.interlace_violations += 1;
                }
                if is_packed(c) {
                    rep.packed_cells += 1;
                    let succ = lattice_successor_lifts(c, modulus, 1);
                    if succ.len() != 1 {
                        return Err(Error::Precondition(format!(
                            "packed state {c:?} has {} allowable transitions",
                            succ.len()
                        )));
                    }
                    if succ[0] != *next {
                        rep.forced_violations += 1;
                    }
                }
            }
        }
    }
    Ok(rep)
}

pub fn deterministic_noncolliding_check(
    n: usize,
    modulus: usize,
    levels: usize,
    steps: usize,
    seed: u64,
) -> Result<StripReport> {
    check_strip(&build_strip(n, modulus, levels, steps, seed)?)
}

/// Matrix text with a `# n= N= kernel=` header and one state per row label.
pub fn kernel_text<S: std::fmt::Debug + Clone + Eq + Hash, T: Copy + Display>(
    name: &str,
    n: usize,
    modulus: usize,
    index: &StateIndex<S>,
    matrix: &DenseMatrix<T>,
) -> String {
    let mut s = format!("# n={n} N={modulus} kernel={name}\n# states:");
    for st in index.states() {
        s.push(' ');
        s.push_str(&format!("{st:?}").replace(' ', ""));
    }
    s.push('\n');
    s.push_str(&matrix.to_text());
    s
}
