//! Interlacing random walks on the alcove and the two measure-preserving
//! maps that couple them: pushing (`φ`) and blocking (`ψ`).
//!
//! The coordinate maps are generic so the lattice walks reuse them with
//! integer arithmetic.

use std::ops::{Add, Neg, Sub};

use num_traits::Zero;
use rand::Rng;

use crate::config::{chord_product, dagger, r_interlaced, tolerance, AlcovePoint};
use crate::error::{Error, Result};

/// Scalar types the coupling maps run on (`f64` and `i64`).
pub trait Coord:
    Copy + PartialOrd + Zero + Add<Output = Self> + Sub<Output = Self> + Neg<Output = Self> + std::fmt::Debug
{
    fn to_f64(self) -> f64;
}

impl Coord for f64 {
    fn to_f64(self) -> f64 {
        self
    }
}

impl Coord for i64 {
    fn to_f64(self) -> f64 {
        self as f64
    }
}

fn cmin<T: Coord>(a: T, b: T) -> T {
    if b < a {
        b
    } else {
        a
    }
}

fn cmax<T: Coord>(a: T, b: T) -> T {
    if b > a {
        b
    } else {
        a
    }
}

/// Periodic extension with 0-based index `i`: `x[i + n] = x[i] + period`.
pub fn ext<T: Coord>(x: &[T], period: T, i: isize) -> T {
    let n = x.len() as isize;
    let k = i.div_euclid(n);
    let j = i.rem_euclid(n) as usize;
    let mut v = x[j];
    if k > 0 {
        for _ in 0..k {
            v = v + period;
        }
    } else {
        for _ in 0..(-k) {
            v = v - period;
        }
    }
    v
}

/// Positional part of `u ≼ x ≼ v`: `x_i ∈ [u_i, u_{i+1}]`, `v_i ∈ [x_i, x_{i+1}]`.
pub fn in_tau<T: Coord>(u: &[T], v: &[T], x: &[T], period: T, tol: f64) -> bool {
    let n = x.len() as isize;
    (0..n).all(|i| {
        let iu = i as usize;
        x[iu].to_f64() >= u[iu].to_f64() - tol
            && x[iu].to_f64() <= ext(u, period, i + 1).to_f64() + tol
            && v[iu].to_f64() >= x[iu].to_f64() - tol
            && v[iu].to_f64() <= ext(x, period, i + 1).to_f64() + tol
    })
}

/// `y_i = min(u_{i+1}, v_i) + max(u_i, v_{i−1}) − x_i`.
pub fn phi_coords<T: Coord>(u: &[T], v: &[T], x: &[T], period: T) -> Vec<T> {
    (0..x.len() as isize)
        .map(|i| {
            let iu = i as usize;
            cmin(ext(u, period, i + 1), v[iu]) + cmax(u[iu], ext(v, period, i - 1)) - x[iu]
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct PeriodicSkorohodSolution<T> {
    pub r: Vec<T>,
    pub l: Vec<T>,
}

/// Unique `n`-periodic `(r, l)` with `r_{i+1} = r_i + z_i + l_{i+1}`, `r, l ≥ 0`
/// and `l_i > 0 ⇒ r_i = 0`. Requires `Σ z < 0`.
pub fn periodic_skorohod<T: Coord>(z: &[T]) -> Result<PeriodicSkorohodSolution<T>> {
    let n = z.len();
    let total = z.iter().fold(T::zero(), |a, &b| a + b);
    if n == 0 || !(total < T::zero()) {
        return Err(Error::Precondition(format!(
            "periodic data must have negative sum, got {total:?}"
        )));
    }
    let mut r = vec![T::zero(); n];
    let mut l = vec![T::zero(); n];
    // Each sweep is monotone in r; a negative cycle sum makes it settle within
    // two sweeps from r ≡ 0, the cap is a safety net.
    let cap = 10_000 * n;
    let mut settled = false;
    for _ in 0..cap {
        let mut changed = false;
        for i in 0..n {
            let j = (i + 1) % n;
            let w = r[i] + z[i];
            let (rj, lj) = if w > T::zero() { (w, T::zero()) } else { (T::zero(), -w) };
            if rj != r[j] || lj != l[j] {
                changed = true;
                r[j] = rj;
                l[j] = lj;
            }
        }
        if !changed {
            settled = true;
            break;
        }
    }
    if !settled {
        return Err(Error::Convergence("periodic Skorohod sweep did not settle".into()));
    }
    let sol = PeriodicSkorohodSolution { r, l };
    let res = skorohod_residual(z, &sol);
    if res > 1e-10 {
        return Err(Error::Convergence(format!("periodic Skorohod residual {res:e}")));
    }
    Ok(sol)
}

/// Largest violation of the defining relations.
pub fn skorohod_residual<T: Coord>(z: &[T], s: &PeriodicSkorohodSolution<T>) -> f64 {
    let n = z.len();
    let mut res = 0.0f64;
    for i in 0..n {
        let j = (i + 1) % n;
        let eq = (s.r[j] - s.r[i] - z[i] - s.l[j]).to_f64().abs();
        let neg = (-s.r[i].to_f64()).max(-s.l[i].to_f64()).max(0.0);
        let comp = s.r[i].to_f64().min(s.l[i].to_f64()).max(0.0);
        res = res.max(eq).max(neg).max(comp);
    }
    res
}

/// Blocking map: `z_i = v_i − x_i − x_{i+1} + u_{i+1}`, `y_i = x_i − l_i`.
pub fn psi_coords<T: Coord>(u: &[T], v: &[T], x: &[T], period: T) -> Result<Vec<T>> {
    let n = x.len() as isize;
    let z: Vec<T> = (0..n)
        .map(|i| {
            let iu = i as usize;
            v[iu] - x[iu] - ext(x, period, i + 1) + ext(u, period, i + 1)
        })
        .collect();
    let sol = periodic_skorohod(&z)?;
    Ok(x.iter().zip(&sol.l).map(|(&xi, &li)| xi - li).collect())
}

fn sum(x: &[f64]) -> f64 {
    x.iter().sum()
}

fn check_tau(u: &AlcovePoint, v: &AlcovePoint, x: &AlcovePoint) -> Result<(f64, f64)> {
    let n = x.n();
    if u.n() != n || v.n() != n {
        return Err(Error::Precondition("configurations of different sizes".into()));
    }
    let s = x.sum() - u.sum();
    let r = v.sum() - x.sum();
    let tol = tolerance(n) * (1.0 + x.coords().iter().fold(0.0f64, |m, c| m.max(c.abs())));
    if !in_tau(u.coords(), v.coords(), x.coords(), x.period(), tol) {
        return Err(Error::NotInterlaced(format!(
            "{:?} is not between {:?} and {:?}",
            x.coords(),
            u.coords(),
            v.coords()
        )));
    }
    Ok((s, r))
}

/// `φ_{u,v}(x)`: maps `u ≼_s x ≼_r v` to `y` with `u ≼_r y ≼_s v`.
pub fn phi_map(u: &AlcovePoint, v: &AlcovePoint, x: &AlcovePoint) -> Result<AlcovePoint> {
    check_tau(u, v, x)?;
    AlcovePoint::new(phi_coords(u.coords(), v.coords(), x.coords(), x.period()), x.period())
}

/// `ψ_{u,v}(x)` for `u ≼_s x ≼_r v` with `s > r`.
pub fn psi_map(u: &AlcovePoint, v: &AlcovePoint, x: &AlcovePoint) -> Result<AlcovePoint> {
    let (s, r) = check_tau(u, v, x)?;
    if s <= r {
        return Err(Error::Precondition(format!("blocking needs s > r, got s={s} r={r}")));
    }
    AlcovePoint::new(psi_coords(u.coords(), v.coords(), x.coords(), x.period())?, x.period())
}

/// Applies `(u, x, v) ↦ (v†, ψ_{u,v}(x)†, u†)` twice and returns the largest
/// coordinate discrepancy with the original triple.
pub fn psi_involution_residual(u: &AlcovePoint, v: &AlcovePoint, x: &AlcovePoint) -> Result<f64> {
    let step = |u: &AlcovePoint, x: &AlcovePoint, v: &AlcovePoint| -> Result<(AlcovePoint, AlcovePoint, AlcovePoint)> {
        let y = psi_map(u, v, x)?;
        Ok((dagger(v), dagger(&y), dagger(u)))
    };
    let (u1, x1, v1) = step(u, x, v)?;
    let (u2, x2, v2) = step(&u1, &x1, &v1)?;
    let d = |a: &AlcovePoint, b: &AlcovePoint| {
        a.coords()
            .iter()
            .zip(b.coords())
            .fold(0.0f64, |m, (p, q)| m.max((p - q).abs()))
    };
    Ok(d(&u2, u).max(d(&x2, x)).max(d(&v2, v)))
}

pub fn psi_involution_check(u: &AlcovePoint, v: &AlcovePoint, x: &AlcovePoint) -> Result<bool> {
    Ok(psi_involution_residual(u, v, x)? <= 1e-10)
}

/// Default attempt cap for the rejection samplers.
pub const DEFAULT_ATTEMPTS: usize = 1_000_000;

/// Exact draw from `q_r(x, ·)`: uniform on `G_r(x)` then Vandermonde rejection.
pub fn sample_q_r<R: Rng + ?Sized>(x: &AlcovePoint, r: f64, rng: &mut R, max_attempts: usize) -> Result<AlcovePoint> {
    let n = x.n();
    let period = x.period();
    if !(r > 0.0 && r < period) {
        return Err(Error::Precondition(format!("r must lie in (0, {period}), got {r}")));
    }
    let gaps: Vec<f64> = (1..=n as isize).map(|i| x.at(i + 1) - x.at(i)).collect();
    let k = (0..n).fold(0, |b, i| if gaps[i] > gaps[b] { i } else { b });
    let bound = 2f64.powi((n * (n - 1) / 2) as i32);
    let mut t = vec![0.0; n];
    for _ in 0..max_attempts {
        let mut rest = r;
        for i in (0..n).filter(|&i| i != k) {
            t[i] = rng.random::<f64>() * gaps[i];
            rest -= t[i];
        }
        if rest < 0.0 || rest > gaps[k] {
            continue;
        }
        t[k] = rest;
        let y: Vec<f64> = x.coords().iter().zip(&t).map(|(a, b)| a + b).collect();
        if rng.random::<f64>() * bound < chord_product(&y) {
            return AlcovePoint::new(y, period);
        }
    }
    Err(Error::SamplerExhausted(max_attempts))
}

#[derive(Debug, Clone)]
pub struct CouplingRun {
    pub x: Vec<AlcovePoint>,
    pub y: Vec<AlcovePoint>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CouplingKind {
    Push,
    Block,
}

/// `X` is an `r`-interlacing walk started from `q_s(y0, ·)`; `Y` follows the
/// chosen map and stays `s`-interlaced below `X`.
pub fn run_coupling<R: Rng + ?Sized>(
    kind: CouplingKind,
    y0: &AlcovePoint,
    r: f64,
    s: f64,
    steps: usize,
    rng: &mut R,
) -> Result<CouplingRun> {
    if kind == CouplingKind::Block && s <= r {
        return Err(Error::Precondition(format!("blocking needs s > r, got s={s} r={r}")));
    }
    let mut x = vec![sample_q_r(y0, s, rng, DEFAULT_ATTEMPTS)?];
    let mut y = vec![y0.clone()];
    for k in 0..steps {
        let next = sample_q_r(&x[k], r, rng, DEFAULT_ATTEMPTS)?;
        let ny = match kind {
            CouplingKind::Push => phi_map(&y[k], &next, &x[k])?,
            CouplingKind::Block => psi_map(&y[k], &next, &x[k])?,
        };
        x.push(next);
        y.push(ny);
    }
    Ok(CouplingRun { x, y })
}

pub fn run_push_coupling<R: Rng + ?Sized>(
    y0: &AlcovePoint,
    r: f64,
    s: f64,
    steps: usize,
    rng: &mut R,
) -> Result<CouplingRun> {
    run_coupling(CouplingKind::Push, y0, r, s, steps, rng)
}

pub fn run_block_coupling<R: Rng + ?Sized>(
    y0: &AlcovePoint,
    r: f64,
    s: f64,
    steps: usize,
    rng: &mut R,
) -> Result<CouplingRun> {
    run_coupling(CouplingKind::Block, y0, r, s, steps, rng)
}

/// Checks `Y(k) ≼_s X(k)` and `Y(k) ≼_r Y(k+1)` along a run.
pub fn coupling_consistent(run: &CouplingRun, r: f64, s: f64) -> bool {
    let yx = run.y.iter().zip(&run.x).all(|(y, x)| r_interlaced(y, x, s));
    let yy = run.y.windows(2).all(|w| r_interlaced(&w[0], &w[1], r));
    let xx = run.x.windows(2).all(|w| r_interlaced(&w[0], &w[1], r));
    yx && yy && xx
}

/// Uniform point of `G_r(x)` without the Vandermonde tilt.
pub fn sample_slice_uniform<R: Rng + ?Sized>(x: &AlcovePoint, r: f64, rng: &mut R) -> Result<AlcovePoint> {
    let n = x.n();
    let gaps: Vec<f64> = (1..=n as isize).map(|i| x.at(i + 1) - x.at(i)).collect();
    let k = (0..n).fold(0, |b, i| if gaps[i] > gaps[b] { i } else { b });
    for _ in 0..DEFAULT_ATTEMPTS {
        let mut t = vec![0.0; n];
        let mut rest = r;
        for i in (0..n).filter(|&i| i != k) {
            t[i] = rng.random::<f64>() * gaps[i];
            rest -= t[i];
        }
        if (0.0..=gaps[k]).contains(&rest) {
            t[k] = rest;
            let y: Vec<f64> = x.coords().iter().zip(&t).map(|(a, b)| a + b).collect();
            return AlcovePoint::new(y, x.period());
        }
    }
    Err(Error::SamplerExhausted(DEFAULT_ATTEMPTS))
}

/// Total-sum bookkeeping shared by both couplings: `Σ X(k) − Σ Y(k) = s`.
pub fn sum_offsets(run: &CouplingRun) -> Vec<f64> {
    run.x
        .iter()
        .zip(&run.y)
        .map(|(x, y)| sum(x.coords()) - sum(y.coords()))
        .collect()
}
