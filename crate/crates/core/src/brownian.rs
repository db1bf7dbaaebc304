//! Interlaced Brownian motions: h-Brownian motion on the alcove, the path
//! Skorohod map for `A_n(l)`, the coupling map `Γ`, reflected Brownian motion
//! with its local times, and the two-particle case written on an interval.

use std::f64::consts::{PI, TAU};

use rand::Rng;
use rand_distr::{Distribution, Exp1, StandardNormal};

use crate::config::{ddagger, in_alcove, project_h0, r_interlaced, tolerance, AlcovePoint, HyperplaneVector};
use crate::error::{Error, Result};
use crate::interlace::{sample_q_r, DEFAULT_ATTEMPTS};
use crate::rng;
use crate::stats::{self, TestResult};

/// Process values on the uniform grid `t_k = k·dt`.
#[derive(Debug, Clone, PartialEq)]
pub struct GridPath {
    dt: f64,
    values: Vec<Vec<f64>>,
}

impl GridPath {
    pub fn new(dt: f64, values: Vec<Vec<f64>>) -> Result<Self> {
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(Error::InvalidConfig(format!("grid step must be positive, got {dt}")));
        }
        let Some(first) = values.first() else {
            return Err(Error::InvalidConfig("empty path".into()));
        };
        let d = first.len();
        if values.iter().any(|v| v.len() != d || v.iter().any(|x| !x.is_finite())) {
            return Err(Error::InvalidConfig("ragged or non-finite path values".into()));
        }
        Ok(Self { dt, values })
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    /// Number of grid points, one more than the number of steps.
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn steps(&self) -> usize {
        self.values.len() - 1
    }

    pub fn dim(&self) -> usize {
        self.values[0].len()
    }

    pub fn time(&self, k: usize) -> f64 {
        k as f64 * self.dt
    }

    pub fn horizon(&self) -> f64 {
        self.time(self.steps())
    }

    pub fn value(&self, k: usize) -> &[f64] {
        &self.values[k]
    }

    pub fn values(&self) -> &[Vec<f64>] {
        &self.values
    }

    pub fn last(&self) -> &[f64] {
        &self.values[self.steps()]
    }

    pub fn component(&self, i: usize) -> Vec<f64> {
        self.values.iter().map(|v| v[i]).collect()
    }

    /// `u(t) = x(t) − x(0)`.
    pub fn increments_from_start(&self) -> GridPath {
        let x0 = self.values[0].clone();
        GridPath {
            dt: self.dt,
            values: self
                .values
                .iter()
                .map(|v| v.iter().zip(&x0).map(|(a, b)| a - b).collect())
                .collect(),
        }
    }

    /// Every `every`-th grid point.
    pub fn subsample(&self, every: usize) -> GridPath {
        assert!(every > 0);
        GridPath {
            dt: self.dt * every as f64,
            values: self.values.iter().step_by(every).cloned().collect(),
        }
    }

    /// Tab-separated `time component value` rows, components 1-based.
    pub fn to_text(&self) -> String {
        let mut out = String::from("time\tcomponent\tvalue\n");
        for (k, v) in self.values.iter().enumerate() {
            for (i, x) in v.iter().enumerate() {
                out.push_str(&format!("{}\t{}\t{}\n", self.time(k), i + 1, x));
            }
        }
        out
    }
}

/// Number of grid steps covering `[0, horizon]`; the horizon must be a
/// multiple of `dt`.
pub fn grid_steps(horizon: f64, dt: f64) -> Result<usize> {
    if !(dt > 0.0) || !(horizon >= 0.0) || !horizon.is_finite() {
        return Err(Error::InvalidConfig(format!("bad horizon {horizon} or step {dt}")));
    }
    let steps = (horizon / dt).round();
    if (steps * dt - horizon).abs() > 1e-9 * horizon.max(dt) {
        return Err(Error::InvalidConfig(format!(
            "horizon {horizon} is not a multiple of dt {dt}"
        )));
    }
    Ok(steps as usize)
}

/// Contact tolerance for `v_i = v_{i+1}` on a grid of step `dt`.
pub fn contact_tolerance(dt: f64) -> f64 {
    2.0 * dt.sqrt()
}

fn normal<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    StandardNormal.sample(rng)
}

/// Top Dirichlet eigenvalue of the Laplacian on the alcove, `−n(n−1)(n+1)/12`.
pub fn lambda0(n: usize) -> f64 {
    let n = n as f64;
    -n * (n - 1.0) * (n + 1.0) / 12.0
}

/// `∂_l log h = Σ_{m≠l} ½ cot((x_l − x_m)/2)`.
pub fn hbm_drift(x: &[f64]) -> Vec<f64> {
    (0..x.len())
        .map(|l| {
            (0..x.len())
                .filter(|&m| m != l)
                .map(|m| 0.5 / (0.5 * (x[l] - x[m])).tan())
                .sum()
        })
        .collect()
}

/// Smallest gap of the circular configuration, wrap-around gap included.
fn min_circular_gap(x: &[f64]) -> f64 {
    let n = x.len();
    let wrap = x[0] + TAU - x[n - 1];
    x.windows(2).map(|w| w[1] - w[0]).fold(wrap, f64::min)
}

fn strictly_inside(x: &[f64]) -> bool {
    x.windows(2).all(|w| w[0] < w[1]) && x[x.len() - 1] < x[0] + TAU
}

/// Deepest substep halving before a step is declared to leave the alcove.
pub const MAX_SUBSTEP_DEPTH: u32 = 30;

fn guarded_step<R: Rng + ?Sized>(x: &[f64], h: f64, dw: &[f64], depth: u32, rng: &mut R) -> Result<Vec<f64>> {
    if min_circular_gap(x) > 4.0 * h.sqrt() || depth >= MAX_SUBSTEP_DEPTH {
        let b = hbm_drift(x);
        let y: Vec<f64> = x.iter().zip(&b).zip(dw).map(|((xi, bi), w)| xi + bi * h + w).collect();
        if strictly_inside(&y) {
            return Ok(y);
        }
        if depth >= MAX_SUBSTEP_DEPTH {
            return Err(Error::Domain(format!("h-Brownian step left the alcove from {x:?}")));
        }
    }
    // W(h/2) given W(h) is N(W(h)/2, h/4).
    let half: Vec<f64> = dw.iter().map(|w| 0.5 * w + 0.5 * h.sqrt() * normal(rng)).collect();
    let rest: Vec<f64> = dw.iter().zip(&half).map(|(w, a)| w - a).collect();
    let mid = guarded_step(x, 0.5 * h, &half, depth + 1, rng)?;
    guarded_step(&mid, 0.5 * h, &rest, depth + 1, rng)
}

/// One Euler step of the h-Brownian motion, halving near collisions.
pub fn hbm_step<R: Rng + ?Sized>(x: &[f64], dt: f64, rng: &mut R) -> Result<Vec<f64>> {
    let sd = dt.sqrt();
    let dw: Vec<f64> = x.iter().map(|_| sd * normal(rng)).collect();
    guarded_step(x, dt, &dw, 0, rng)
}

/// `n` non-colliding Brownian motions on the circle, lifted to `A_n`.
pub fn hbm_simulate<R: Rng + ?Sized>(x0: &AlcovePoint, horizon: f64, dt: f64, rng: &mut R) -> Result<GridPath> {
    if (x0.period() - TAU).abs() > tolerance(1) {
        return Err(Error::Precondition("h-Brownian motion lives on the 2π alcove".into()));
    }
    if !strictly_inside(x0.coords()) {
        return Err(Error::Precondition(format!(
            "start {:?} is on the boundary",
            x0.coords()
        )));
    }
    let steps = grid_steps(horizon, dt)?;
    let mut values = Vec::with_capacity(steps + 1);
    values.push(x0.coords().to_vec());
    for k in 0..steps {
        let next = hbm_step(&values[k], dt, rng)?;
        values.push(next);
    }
    GridPath::new(dt, values)
}

/// Output of the path Skorohod map: `v` in `A_n(l)` and the pushes `θ`.
#[derive(Debug, Clone)]
pub struct SkorohodPathData {
    pub v: GridPath,
    pub theta: GridPath,
}

fn alcove_gap(v: &[f64], l: f64, i: usize) -> f64 {
    let n = v.len();
    if i + 1 < n {
        v[i + 1] - v[i]
    } else {
        v[0] + l - v[n - 1]
    }
}

fn oscillation(u: &GridPath, t0: usize, t: usize) -> f64 {
    u.value(t).iter().zip(u.value(t0)).map(|(a, b)| (a - b).abs()).sum()
}

/// Fills `(t0, t1]`: the widest gap `k` is left free, then `v_{k−1}, …, v_{k+1}`
/// are reflected one after another below their right neighbour. Returns
/// false if the anchored gap closed, meaning the window was too long.
fn reflect_window(
    u: &GridPath,
    v: &mut [Vec<f64>],
    theta: &mut [Vec<f64>],
    t0: usize,
    t1: usize,
    l: f64,
) -> Result<bool> {
    let n = v[t0].len();
    let start = v[t0].clone();
    let k = (0..n).fold(0, |b, i| {
        if alcove_gap(&start, l, i) > alcove_gap(&start, l, b) {
            i
        } else {
            b
        }
    });
    let scale = 1.0 + start.iter().fold(l, |m, x| m.max(x.abs()));
    let tol = tolerance(n) * scale;
    if alcove_gap(&start, l, k) < l / n as f64 - tol {
        return Err(Error::Domain(format!("no gap of width l/n at {start:?}")));
    }
    for t in t0 + 1..=t1 {
        v[t][k] = start[k] + u.value(t)[k] - u.value(t0)[k];
        theta[t][k] = theta[t0][k];
    }
    for j in 1..n {
        let i = (k + n - j) % n;
        let mut push = 0.0f64;
        for t in t0 + 1..=t1 {
            let free = start[i] + u.value(t)[i] - u.value(t0)[i];
            let upper = if i + 1 < n { v[t][i + 1] } else { v[t][0] + l };
            push = push.max(free - upper);
            theta[t][i] = theta[t0][i] + push;
            v[t][i] = free - push;
        }
    }
    Ok((t0 + 1..=t1).all(|t| alcove_gap(&v[t], l, k) >= -tol))
}

/// Skorohod map for `A_n(l)`: `v_i = v_i(0) + u_i − θ_i` stays in the alcove
/// and `θ_i` grows only when `v_i = v_{i+1}` (`v_{n+1} = v_1 + l`).
///
/// The path is cut into windows on which `Σ_i |Δu_i| < l/(2n²)`; a window is
/// halved if the anchored gap still closes.
pub fn path_skorohod_alcove(u: &GridPath, v0: &[f64], l: f64) -> Result<SkorohodPathData> {
    let n = v0.len();
    if u.dim() != n {
        return Err(Error::InvalidConfig(format!(
            "driver has dimension {}, start {n}",
            u.dim()
        )));
    }
    if !(l > 0.0) || !in_alcove(v0, l) {
        return Err(Error::Precondition(format!("{v0:?} is not in A_{n}({l})")));
    }
    if u.value(0).iter().any(|x| *x != 0.0) {
        return Err(Error::Precondition("driver must start at 0".into()));
    }
    let last = u.steps();
    let mut v = vec![vec![0.0; n]; last + 1];
    let mut theta = vec![vec![0.0; n]; last + 1];
    v[0] = v0.to_vec();
    let bound = l / (2.0 * (n * n) as f64);
    let mut t0 = 0;
    while t0 < last {
        let mut t1 = t0 + 1;
        while t1 < last && oscillation(u, t0, t1 + 1) < bound {
            t1 += 1;
        }
        while !reflect_window(u, &mut v, &mut theta, t0, t1, l)? {
            if t1 == t0 + 1 {
                return Err(Error::Convergence(format!(
                    "one grid step at t={} moves more than the alcove allows",
                    u.time(t0)
                )));
            }
            t1 = t0 + (t1 - t0) / 2;
        }
        t0 = t1;
    }
    Ok(SkorohodPathData {
        v: GridPath::new(u.dt(), v)?,
        theta: GridPath::new(u.dt(), theta)?,
    })
}

/// `Σ_i Σ_t 1{v_{i+1}(t) − v_i(t) > ctol} Δθ_i(t)`: mass of pushes away from contact.
pub fn complementarity_residual(data: &SkorohodPathData, l: f64, ctol: f64) -> f64 {
    let n = data.v.dim();
    let mut total = 0.0;
    for t in 1..data.v.len() {
        for i in 0..n {
            let dtheta = data.theta.value(t)[i] - data.theta.value(t - 1)[i];
            if alcove_gap(data.v.value(t), l, i) > ctol {
                total += dtheta;
            }
        }
    }
    total
}

/// `y = Γ_{y(0)}(x)` with its pushes.
#[derive(Debug, Clone)]
pub struct GammaOutput {
    pub y: GridPath,
    pub theta: GridPath,
}

/// Follows `x` with `y ≼_s x`: `y_i(t) = y_i(0) + x_i(t) − x_i(0) + θ_{i−1}(t) − θ_i(t)`,
/// `θ_0 = θ_n`, where `θ_i` pushes only when `y_{i+1} = x_i`.
pub fn gamma_map(y0: &AlcovePoint, x: &GridPath, s: f64) -> Result<GammaOutput> {
    let n = y0.n();
    if x.dim() != n {
        return Err(Error::InvalidConfig(format!(
            "path dimension {} vs {n} particles",
            x.dim()
        )));
    }
    if !(s > 0.0 && s < TAU) {
        return Err(Error::Precondition(format!("s must lie in (0, 2π), got {s}")));
    }
    let x0 = AlcovePoint::circle(x.value(0).to_vec())?;
    if !r_interlaced(y0, &x0, s) {
        return Err(Error::NotInterlaced(format!(
            "{:?} below {:?} at level {s}",
            y0.coords(),
            x0.coords()
        )));
    }
    // v_i(0) − v_{i−1}(0) = y_i(0) − x_{i−1}(0)
    let mut v0 = vec![0.0; n];
    for i in 1..n {
        v0[i] = v0[i - 1] + y0.coords()[i] - x0.coords()[i - 1];
    }
    let u = x.increments_from_start();
    let sk = path_skorohod_alcove(&u, &v0, TAU - s)?;
    let ys: Vec<Vec<f64>> = (0..u.len())
        .map(|t| {
            let th = sk.theta.value(t);
            (0..n)
                .map(|i| y0.coords()[i] + u.value(t)[i] + th[(i + n - 1) % n] - th[i])
                .collect()
        })
        .collect();
    let y = GridPath::new(x.dt(), ys)?;
    check_gamma(x, &y, &sk.theta, s)?;
    Ok(GammaOutput { y, theta: sk.theta })
}

fn check_gamma(x: &GridPath, y: &GridPath, theta: &GridPath, s: f64) -> Result<()> {
    let n = x.dim();
    let ctol = contact_tolerance(x.dt());
    for t in 0..x.len() {
        let (xt, yt) = (x.value(t), y.value(t));
        let scale = 1.0 + xt.iter().chain(yt).fold(0.0f64, |m, v| m.max(v.abs()));
        let tol = 1e3 * tolerance(n) * scale;
        for i in 0..n {
            let below = if i == 0 { xt[n - 1] - TAU } else { xt[i - 1] };
            if yt[i] < below - tol || yt[i] > xt[i] + tol {
                return Err(Error::NotInterlaced(format!("y={yt:?} x={xt:?} at t={}", x.time(t))));
            }
            if t > 0 && theta.value(t)[i] > theta.value(t - 1)[i] {
                let next_y = if i + 1 < n { yt[i + 1] } else { yt[0] + TAU };
                if next_y - xt[i] > ctol {
                    return Err(Error::Domain(format!(
                        "push {} away from contact at t={}",
                        i + 1,
                        x.time(t)
                    )));
                }
            }
        }
        let gap = xt.iter().sum::<f64>() - yt.iter().sum::<f64>() - s;
        if gap.abs() > tol {
            return Err(Error::Domain(format!("level drifted by {gap:e} at t={}", x.time(t))));
        }
    }
    Ok(())
}

/// An h-Brownian motion `X` started from `q_s(y0, ·)` and `Y = Γ_{y0}(X)`.
pub fn simulate_gamma_pair<R: Rng + ?Sized>(
    y0: &AlcovePoint,
    s: f64,
    horizon: f64,
    dt: f64,
    rng: &mut R,
) -> Result<(GridPath, GridPath)> {
    let x0 = sample_q_r(y0, s, rng, DEFAULT_ATTEMPTS)?;
    let x = hbm_simulate(&x0, horizon, dt, rng)?;
    let g = gamma_map(y0, &x, s)?;
    Ok((x, g.y))
}

/// Uniform point of `H_0 ∩ A_n(l)`: the `n` gaps are uniform on the simplex.
pub fn sample_uniform_alcove_h0<R: Rng + ?Sized>(n: usize, l: f64, rng: &mut R) -> Vec<f64> {
    let e: Vec<f64> = (0..n).map(|_| Exp1.sample(rng)).collect();
    let total: f64 = e.iter().sum();
    let mut v = vec![0.0; n];
    for i in 1..n {
        v[i] = v[i - 1] + l * e[i - 1] / total;
    }
    project_h0(&v).coords().to_vec()
}

/// Reflected Brownian motion in `H_0 ∩ A_n(2π − s)` and its pushes `Θ`.
#[derive(Debug, Clone)]
pub struct ReflectedPath {
    pub r: GridPath,
    pub theta: GridPath,
}

pub fn reflected_bm_with_local_time<R: Rng + ?Sized>(
    n: usize,
    s: f64,
    horizon: f64,
    dt: f64,
    rng: &mut R,
) -> Result<ReflectedPath> {
    if n == 0 || !(s > 0.0 && s < TAU) {
        return Err(Error::Precondition(format!(
            "need n ≥ 1 and s in (0, 2π), got n={n} s={s}"
        )));
    }
    let l = TAU - s;
    let steps = grid_steps(horizon, dt)?;
    let v0 = sample_uniform_alcove_h0(n, l, rng);
    let sd = dt.sqrt();
    let mut u = vec![vec![0.0; n]; steps + 1];
    for k in 1..=steps {
        for i in 0..n {
            u[k][i] = u[k - 1][i] + sd * normal(rng);
        }
    }
    let sk = path_skorohod_alcove(&GridPath::new(dt, u)?, &v0, l)?;
    let r = sk.v.values().iter().map(|v| project_h0(v).coords().to_vec()).collect();
    Ok(ReflectedPath {
        r: GridPath::new(dt, r)?,
        theta: sk.theta,
    })
}

/// `L(t) = L(0) − π_{H_0} Θ(t)`.
pub fn l_process(l0: &[f64], theta: &GridPath) -> GridPath {
    let values = theta
        .values()
        .iter()
        .map(|th| {
            let p = project_h0(th);
            l0.iter().zip(p.coords()).map(|(a, b)| a - b).collect()
        })
        .collect();
    GridPath::new(theta.dt(), values).expect("finite pushes")
}

/// Coordinates `(r, l)` of `(x, y) ∈ E(s)`: `r_{i+1} − r_i = y_{i+1} − x_i`
/// and `l_{i+1} − l_i = x_{i+1} − y_{i+1}`, both centred.
pub fn bead_coordinates(x: &AlcovePoint, y: &AlcovePoint, s: f64) -> Result<(HyperplaneVector, HyperplaneVector)> {
    let n = x.n();
    let tol = tolerance(n) * (1.0 + s);
    if y.n() != n || (x.sum() - s / 2.0).abs() > tol || (y.sum() + s / 2.0).abs() > tol {
        return Err(Error::Precondition(format!(
            "need Σx = s/2 and Σy = −s/2, got {} and {}",
            x.sum(),
            y.sum()
        )));
    }
    if !r_interlaced(y, x, s) {
        return Err(Error::NotInterlaced(format!("{:?} below {:?}", y.coords(), x.coords())));
    }
    let mut r = vec![0.0; n];
    let mut l = vec![0.0; n];
    for i in 1..n {
        r[i] = r[i - 1] + y.coords()[i] - x.coords()[i - 1];
        l[i] = l[i - 1] + x.coords()[i] - y.coords()[i];
    }
    Ok((project_h0(&r), project_h0(&l)))
}

/// Inverse of [`bead_coordinates`]: `x_i = r_i + l_i + s/2n`, `y_i = r_i + l_{i−1} + s/2n`
/// with `l_0 = l_n − s`.
pub fn from_bead_coordinates(r: &HyperplaneVector, l: &HyperplaneVector, s: f64) -> Result<(AlcovePoint, AlcovePoint)> {
    let n = r.n();
    if l.n() != n || !in_alcove(r.coords(), TAU - s) || !in_alcove(l.coords(), s) {
        return Err(Error::Precondition("coordinates outside the product of alcoves".into()));
    }
    let c = s / (2.0 * n as f64);
    let (rc, lc) = (r.coords(), l.coords());
    let x: Vec<f64> = (0..n).map(|i| rc[i] + lc[i] + c).collect();
    let y: Vec<f64> = (0..n)
        .map(|i| rc[i] + if i == 0 { lc[n - 1] - s } else { lc[i - 1] } + c)
        .collect();
    Ok((AlcovePoint::circle(x)?, AlcovePoint::circle(y)?))
}

fn dagger_vec(x: &[f64]) -> Vec<f64> {
    x.iter().rev().map(|v| -v).collect()
}

/// Inward unit normals `n^i` of the faces `x_i = x_{i+1}` of `H_0 ∩ A_n(l)`,
/// reflection directions `v^i` (the push `−e_i` seen in `H_0`, scaled so
/// `n^i·v^i = 1`) and their tangential parts `q^i = v^i − n^i`.
#[derive(Debug, Clone)]
pub struct ReflectionGeometry {
    pub normals: Vec<Vec<f64>>,
    pub directions: Vec<Vec<f64>>,
    pub tangential: Vec<Vec<f64>>,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn reflection_geometry(n: usize) -> ReflectionGeometry {
    assert!(n >= 2, "faces need at least two particles");
    let mut normals = Vec::with_capacity(n);
    let mut directions = Vec::with_capacity(n);
    let mut tangential = Vec::with_capacity(n);
    for i in 0..n {
        let mut nv = vec![0.0; n];
        nv[(i + 1) % n] += 1.0;
        nv[i] -= 1.0;
        let norm = dot(&nv, &nv).sqrt();
        nv.iter_mut().for_each(|c| *c /= norm);
        let mut push = vec![0.0; n];
        push[i] = -1.0;
        let push = project_h0(&push).coords().to_vec();
        let scale = dot(&nv, &push);
        let v: Vec<f64> = push.iter().map(|c| c / scale).collect();
        let q: Vec<f64> = v.iter().zip(&nv).map(|(a, b)| a - b).collect();
        normals.push(nv);
        directions.push(v);
        tangential.push(q);
    }
    ReflectionGeometry {
        normals,
        directions,
        tangential,
    }
}

/// `max_{i≠j} |n^i·q^j + q^i·n^j|`.
pub fn skew_symmetry_residual(g: &ReflectionGeometry) -> f64 {
    let n = g.normals.len();
    let mut worst = 0.0f64;
    for i in 0..n {
        for j in (0..n).filter(|&j| j != i) {
            let v = dot(&g.normals[i], &g.tangential[j]) + dot(&g.tangential[i], &g.normals[j]);
            worst = worst.max(v.abs());
        }
    }
    worst
}

/// Two-sided reflection of a sequence into `[0, a]` computed four ways.
#[derive(Debug, Clone)]
pub struct IntervalReflection {
    pub z_iter: Vec<f64>,
    pub z_maxmin: Vec<f64>,
    pub z_minmax: Vec<f64>,
    pub z_klrs: Vec<f64>,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

impl IntervalReflection {
    pub fn max_disagreement(&self) -> f64 {
        let mut worst = 0.0f64;
        for k in 0..self.z_iter.len() {
            let zs = [self.z_iter[k], self.z_maxmin[k], self.z_minmax[k], self.z_klrs[k]];
            let hi = zs.iter().fold(f64::NEG_INFINITY, |m, v| m.max(*v));
            let lo = zs.iter().fold(f64::INFINITY, |m, v| m.min(*v));
            worst = worst.max(hi - lo);
        }
        worst
    }
}

fn check_interval_input(f: &[f64], a: f64) -> Result<()> {
    if !(a > 0.0) {
        return Err(Error::Precondition(format!(
            "interval length must be positive, got {a}"
        )));
    }
    match f.first() {
        Some(&f0) if (0.0..=a).contains(&f0) => Ok(()),
        _ => Err(Error::Precondition(format!("path must start in [0, {a}]"))),
    }
}

/// `Z = f + L − U` by clamping step by step; returns `(Z, L, U)`.
pub fn reflect_interval(f: &[f64], a: f64) -> Result<(Vec<f64>, Vec<f64>, Vec<f64>)> {
    check_interval_input(f, a)?;
    let m = f.len();
    let (mut z, mut lo, mut up) = (vec![f[0]; m], vec![0.0; m], vec![0.0; m]);
    for k in 1..m {
        let w = z[k - 1] + f[k] - f[k - 1];
        let (dl, du) = ((-w).max(0.0), (w - a).max(0.0));
        z[k] = w + dl - du;
        lo[k] = lo[k - 1] + dl;
        up[k] = up[k - 1] + du;
    }
    Ok((z, lo, up))
}

/// `max{ sup_r min{f(r,t), a + inf_{r≤s≤t} f(s,t)}, min{f(t), a + inf_{0<s<t} f(s,t)} }`.
///
/// On a grid the open range `0 < s < t` is closed up: for continuous paths
/// nothing changes, while dropping `s = t` would lose the cap `Z ≤ a`.
fn z_maxmin(f: &[f64], a: f64, t: usize) -> f64 {
    let ft = f[t];
    let mut first = f64::NEG_INFINITY;
    let mut run_max = f64::NEG_INFINITY;
    for r in (0..=t).rev() {
        run_max = run_max.max(f[r]);
        first = first.max((ft - f[r]).min(a + ft - run_max));
    }
    let inner = f[..=t].iter().fold(f64::INFINITY, |m, &v| m.min(a + ft - v));
    first.max(ft.min(inner))
}

/// `min{ inf_r max{a + f(r,t), sup_{r≤s≤t} f(s,t)}, max{f(t), sup_{0<s<t} f(s,t)} }`.
fn z_minmax(f: &[f64], a: f64, t: usize) -> f64 {
    let ft = f[t];
    let mut first = f64::INFINITY;
    let mut run_min = f64::INFINITY;
    for r in (0..=t).rev() {
        run_min = run_min.min(f[r]);
        first = first.min((a + ft - f[r]).max(ft - run_min));
    }
    let inner = f[..=t].iter().fold(f64::NEG_INFINITY, |m, &v| m.max(ft - v));
    first.min(ft.max(inner))
}

/// `Z_t = φ(t) − sup_{s≤t} [(φ(s) − a)⁺ ∧ inf_{s≤u≤t} φ(u)]`, `φ = f + sup[−f]⁺`.
fn z_klrs(phi: &[f64], a: f64, t: usize) -> f64 {
    let mut best = f64::NEG_INFINITY;
    let mut run_min = f64::INFINITY;
    for s in (0..=t).rev() {
        run_min = run_min.min(phi[s]);
        best = best.max((phi[s] - a).max(0.0).min(run_min));
    }
    phi[t] - best
}

/// All four evaluations of the reflection of `f` in `[0, a]`; `O(len²)`.
pub fn interval_reflection_formulas(f: &[f64], a: f64) -> Result<IntervalReflection> {
    let (z_iter, lower, upper) = reflect_interval(f, a)?;
    let mut phi = Vec::with_capacity(f.len());
    let mut lift = 0.0f64;
    for &v in f {
        lift = lift.max(-v);
        phi.push(v + lift);
    }
    let idx = 0..f.len();
    Ok(IntervalReflection {
        z_maxmin: idx.clone().map(|t| z_maxmin(f, a, t)).collect(),
        z_minmax: idx.clone().map(|t| z_minmax(f, a, t)).collect(),
        z_klrs: idx.map(|t| z_klrs(&phi, a, t)).collect(),
        z_iter,
        lower,
        upper,
    })
}

/// Two interlaced particles written on an interval: `X` is Brownian motion
/// conditioned to stay in `[−p, p]`, `Z` reflects `X + (y − X_0 + a)/2` in
/// `[0, a]`, and `Y = y − X_0 + X + 2(L − U)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IntervalCoupling {
    pub p: f64,
    pub a: f64,
    pub y: f64,
    pub horizon: f64,
    pub dt: f64,
}

impl IntervalCoupling {
    fn validate(&self) -> Result<usize> {
        if !(self.p > 0.0) || !(self.a > 0.0 && self.a <= 2.0 * self.p) || !(self.y.abs() < self.p) {
            return Err(Error::Precondition(format!(
                "need p > 0, a in (0, 2p], |y| < p; got p={} a={} y={}",
                self.p, self.a, self.y
            )));
        }
        grid_steps(self.horizon, self.dt)
    }

    /// Support `[|y + a − p| − p, p − |y + p − a|]` of `X_0`.
    pub fn initial_support(&self) -> (f64, f64) {
        let (p, a, y) = (self.p, self.a, self.y);
        ((y + a - p).abs() - p, p - (y + p - a).abs())
    }
}

/// `cos(πx/2p)`, the ground state on `[−p, p]`.
pub fn interval_ground_state(x: f64, p: f64) -> f64 {
    (PI * x / (2.0 * p)).cos()
}

/// Probability that a Brownian bridge from `x` to `z` over time `t` stays in
/// `(−p, p)`, by the method of images.
pub fn bridge_survival(x: f64, z: f64, p: f64, t: f64) -> f64 {
    if x.abs() >= p || z.abs() >= p {
        return 0.0;
    }
    let w = 2.0 * p;
    let (x0, z0) = (x + p, z + p);
    let kernel = |d: f64| (-(d * d - (z0 - x0).powi(2)) / (2.0 * t)).exp();
    let mut s = 0.0;
    for k in -4i32..=4 {
        let shift = 2.0 * k as f64 * w;
        s += kernel(z0 - x0 + shift) - kernel(z0 + x0 + shift);
    }
    s.clamp(0.0, 1.0)
}

/// One exact transition of the conditioned process: Gaussian proposal,
/// accepted with probability `h(z)·survival`.
pub fn conditioned_step<R: Rng + ?Sized>(x: f64, p: f64, dt: f64, rng: &mut R) -> Result<f64> {
    let sd = dt.sqrt();
    for _ in 0..DEFAULT_ATTEMPTS {
        let z = x + sd * normal(rng);
        if z.abs() >= p {
            continue;
        }
        if rng.random::<f64>() < interval_ground_state(z, p) * bridge_survival(x, z, p, dt) {
            return Ok(z);
        }
    }
    Err(Error::SamplerExhausted(DEFAULT_ATTEMPTS))
}

/// Minimum of a Brownian bridge from `x` to `z` over time `t`, conditioned to
/// stay above `floor`: `P(min ≤ c) = exp(−2(x−c)(z−c)/t)`.
fn bridge_min<R: Rng + ?Sized>(x: f64, z: f64, t: f64, floor: f64, rng: &mut R) -> f64 {
    let lo = if floor < x.min(z) {
        (-2.0 * (x - floor) * (z - floor) / t).exp()
    } else {
        1.0
    };
    let u = lo + (1.0 - lo) * (1.0 - rng.random::<f64>());
    0.5 * (x + z - ((x - z).powi(2) - 2.0 * t * u.ln()).sqrt())
}

#[derive(Debug, Clone)]
pub struct IntervalCouplingRun {
    pub x: Vec<f64>,
    pub z: Vec<f64>,
    pub y: Vec<f64>,
    /// Steps where the bridge could have reached both ends of `[0, a]`.
    pub double_contacts: usize,
}

fn sample_initial<R: Rng + ?Sized>(c: &IntervalCoupling, rng: &mut R) -> f64 {
    let (lo, hi) = c.initial_support();
    let k = PI / (2.0 * c.p);
    let (slo, shi) = ((k * lo).sin(), (k * hi).sin());
    (slo + rng.random::<f64>() * (shi - slo)).clamp(-1.0, 1.0).asin() / k
}

fn run_interval<R: Rng + ?Sized>(c: &IntervalCoupling, rng: &mut R, keep: bool) -> Result<IntervalCouplingRun> {
    let steps = c.validate()?;
    let x0 = sample_initial(c, rng);
    let shift = (c.y - x0 + c.a) / 2.0;
    let (mut x, mut z) = (x0, x0 + shift);
    let (mut lo, mut up) = (0.0f64, 0.0f64);
    let mut doubles = 0;
    let mut run = IntervalCouplingRun {
        x: vec![x],
        z: vec![z],
        y: vec![c.y],
        double_contacts: 0,
    };
    for _ in 0..steps {
        let xn = conditioned_step(x, c.p, c.dt, rng)?;
        // Only the nearer end of [0, a] can be reached within one step; the
        // bridge extreme towards it decides the push.
        let mut zn = z + xn - x;
        if z <= 0.5 * c.a {
            let low = z + bridge_min(x, xn, c.dt, -c.p, rng) - x;
            let dl = (-low).max(0.0);
            lo += dl;
            zn += dl;
            if zn > c.a {
                doubles += 1;
                up += zn - c.a;
                zn = c.a;
            }
        } else {
            let high = z - bridge_min(-x, -xn, c.dt, -c.p, rng) - x;
            let du = (high - c.a).max(0.0);
            up += du;
            zn -= du;
            if zn < 0.0 {
                doubles += 1;
                lo -= zn;
                zn = 0.0;
            }
        }
        x = xn;
        z = zn;
        if keep {
            run.x.push(x);
            run.z.push(z);
            run.y.push(c.y - x0 + x + 2.0 * (lo - up));
        }
    }
    if !keep {
        run.x = vec![x];
        run.z = vec![z];
        run.y = vec![c.y - x0 + x + 2.0 * (lo - up)];
    }
    run.double_contacts = doubles;
    Ok(run)
}

pub fn simulate_interval_coupling<R: Rng + ?Sized>(c: &IntervalCoupling, rng: &mut R) -> Result<IntervalCouplingRun> {
    run_interval(c, rng, true)
}

/// CDF at `z` of Brownian motion started at `y`, conditioned to stay in
/// `[−p, p]`, at time `t`: sine eigenexpansion integrated term by term.
pub fn conditioned_bm_cdf(y: f64, z: f64, p: f64, t: f64) -> Result<f64> {
    if !(y.abs() < p) || !(t > 0.0) {
        return Err(Error::Precondition(format!(
            "need |y| < p and t > 0, got y={y} p={p} t={t}"
        )));
    }
    if z <= -p {
        return Ok(0.0);
    }
    if z >= p {
        return Ok(1.0);
    }
    let rate = PI * PI / (8.0 * p * p);
    let kmax = ((40.0 / (rate * t)).sqrt().ceil() as usize + 2).max(4);
    if kmax > 1_000_000 {
        return Err(Error::Convergence(format!("eigenexpansion needs {kmax} terms")));
    }
    let (uy, u) = ((y + p) / (2.0 * p), (z + p) / (2.0 * p));
    // ∫_0^u sin(πv) sin(kπv) dv
    let overlap = |k: usize| {
        if k == 1 {
            0.5 * (u - (TAU * u).sin() / TAU)
        } else {
            let (km, kp) = ((k - 1) as f64 * PI, (k + 1) as f64 * PI);
            0.5 * ((km * u).sin() / km - (kp * u).sin() / kp)
        }
    };
    let mut sum = 0.0;
    for k in 1..=kmax {
        let kf = k as f64;
        sum += (kf * PI * uy).sin() * (-(kf * kf - 1.0) * rate * t).exp() * overlap(k);
    }
    Ok((2.0 * sum / (PI * uy).sin()).clamp(0.0, 1.0))
}

#[derive(Debug, Clone)]
pub struct N2CouplingReport {
    pub params: IntervalCoupling,
    pub replicas: usize,
    /// KS test of `Y_T` against the conditioned law.
    pub ks: TestResult,
    /// KS test of `Y_T` against `N(y, T)`, the unconditioned limit.
    pub ks_free: TestResult,
    pub mean_y: f64,
    pub double_contacts: usize,
    /// `max |Y_0 − y|` over the replicas that kept their whole path.
    pub start_error: f64,
}

pub fn verify_n2_coupling(c: &IntervalCoupling, replicas: usize, seed: u64) -> Result<N2CouplingReport> {
    c.validate()?;
    let runs = rng::par_replicas(seed, replicas, |i, r| run_interval(c, r, i < 16))?;
    let ys: Vec<f64> = runs.iter().map(|run| *run.y.last().expect("non-empty")).collect();
    let start_error = runs
        .iter()
        .filter(|run| run.y.len() > 1)
        .fold(0.0f64, |m, run| m.max((run.y[0] - c.y).abs()));
    // Errors depend only on (y, p, T); surface them before the test.
    conditioned_bm_cdf(c.y, 0.0, c.p, c.horizon)?;
    let ks = stats::ks_test(&ys, |v| {
        conditioned_bm_cdf(c.y, v, c.p, c.horizon).expect("checked above")
    });
    let sd = c.horizon.sqrt();
    let ks_free = stats::ks_test(&ys, |v| stats::normal_cdf(v, c.y, sd));
    Ok(N2CouplingReport {
        params: *c,
        replicas,
        ks,
        ks_free,
        mean_y: ys.iter().sum::<f64>() / ys.len() as f64,
        double_contacts: runs.iter().map(|r| r.double_contacts).sum(),
        start_error,
    })
}

/// A two-time statistic evaluated on the forward path and on its reversal.
#[derive(Debug, Clone)]
pub struct ReversalStat {
    pub name: String,
    pub forward: f64,
    pub reversed: f64,
    /// Standard error of the paired difference.
    pub std_error: f64,
}

impl ReversalStat {
    pub fn z_score(&self) -> f64 {
        if self.std_error > 0.0 {
            (self.forward - self.reversed) / self.std_error
        } else if self.forward == self.reversed {
            0.0
        } else {
            f64::INFINITY
        }
    }
}

#[derive(Debug, Clone)]
pub struct TimeReversalReport {
    pub replicas: usize,
    /// Replicas on which `L` stayed in `A_n(s)`.
    pub kept: usize,
    pub stats: Vec<ReversalStat>,
}

impl TimeReversalReport {
    pub fn max_abs_z(&self) -> f64 {
        self.stats.iter().fold(0.0f64, |m, s| m.max(s.z_score().abs()))
    }
}

const REVERSAL_TIMES: [(f64, f64); 2] = [(0.25, 0.75), (0.0, 1.0)];
const REVERSAL_NAMES: [&str; 4] = ["R_n(a)*R_n(b)^2", "R_n(a)*L_n(b)", "L_n(a)*R_n(b)", "L_n(a)*L_n(b)^2"];

fn reversal_values(r: &[&[f64]; 2], l: &[&[f64]; 2]) -> [f64; 4] {
    let n = r[0].len() - 1;
    let (ra, rb, la, lb) = (r[0][n], r[1][n], l[0][n], l[1][n]);
    [ra * rb * rb, ra * lb, la * rb, la * lb * lb]
}

/// Compares `(R(t), L(t))` with `(R†(T−t), L‡(T−t))` on the event that `L`
/// stays in `A_n(s)`, through products of last coordinates at two times.
pub fn verify_time_reversal(
    n: usize,
    s: f64,
    horizon: f64,
    dt: f64,
    replicas: usize,
    seed: u64,
) -> Result<TimeReversalReport> {
    let steps = grid_steps(horizon, dt)?;
    let idx = |f: f64| (f * steps as f64).round() as usize;
    let samples = rng::par_replicas(seed, replicas, |_, rng| -> Result<Option<Vec<(f64, f64)>>> {
        let path = reflected_bm_with_local_time(n, s, horizon, dt, rng)?;
        let l0 = sample_uniform_alcove_h0(n, s, rng);
        let lp = l_process(&l0, &path.theta);
        if !lp.values().iter().all(|v| in_alcove(v, s)) {
            return Ok(None);
        }
        let rev_r = |k: usize| dagger_vec(path.r.value(steps - k));
        let rev_l = |k: usize| {
            let v = HyperplaneVector::new(lp.value(steps - k).to_vec(), 0.0).expect("centred");
            ddagger(&v, s).coords().to_vec()
        };
        let mut out = Vec::new();
        for &(fa, fb) in &REVERSAL_TIMES {
            let (a, b) = (idx(fa), idx(fb));
            let fwd = reversal_values(&[path.r.value(a), path.r.value(b)], &[lp.value(a), lp.value(b)]);
            let (ra, rb, la, lb) = (rev_r(a), rev_r(b), rev_l(a), rev_l(b));
            let bwd = reversal_values(&[&ra, &rb], &[&la, &lb]);
            out.extend(fwd.into_iter().zip(bwd));
        }
        Ok(Some(out))
    })?;
    let kept: Vec<Vec<(f64, f64)>> = samples.into_iter().flatten().collect();
    let mut stats_out = Vec::new();
    for (j, &(fa, fb)) in REVERSAL_TIMES.iter().enumerate() {
        for (m, name) in REVERSAL_NAMES.iter().enumerate() {
            let col = j * REVERSAL_NAMES.len() + m;
            let fwd: Vec<f64> = kept.iter().map(|v| v[col].0).collect();
            let bwd: Vec<f64> = kept.iter().map(|v| v[col].1).collect();
            let diff: Vec<f64> = fwd.iter().zip(&bwd).map(|(a, b)| a - b).collect();
            let (_, se) = stats::mean_se(&diff);
            stats_out.push(ReversalStat {
                name: format!("{name} a={} b={}", fa * horizon, fb * horizon),
                forward: stats::mean_se(&fwd).0,
                reversed: stats::mean_se(&bwd).0,
                std_error: se,
            });
        }
    }
    Ok(TimeReversalReport {
        replicas,
        kept: kept.len(),
        stats: stats_out,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::dagger;
    use crate::rng;
    use crate::stats::{energy_test, ks_test, normal_cdf};
    use proptest::prelude::*;

    fn path(dt: f64, rows: Vec<Vec<f64>>) -> GridPath {
        GridPath::new(dt, rows).unwrap()
    }

    fn random_walk(n: usize, steps: usize, dt: f64, seed: u64) -> GridPath {
        let mut r = rng::master(seed);
        let mut rows = vec![vec![0.0; n]];
        for k in 0..steps {
            let next = rows[k].iter().map(|v| v + dt.sqrt() * normal(&mut r)).collect();
            rows.push(next);
        }
        path(dt, rows)
    }

    #[test]
    fn grid_path_validation_and_text() {
        assert!(GridPath::new(0.0, vec![vec![0.0]]).is_err());
        assert!(GridPath::new(0.1, vec![]).is_err());
        assert!(GridPath::new(0.1, vec![vec![0.0], vec![0.0, 1.0]]).is_err());
        let p = path(0.5, vec![vec![1.0, 2.0], vec![3.0, 4.0]]);
        assert_eq!(
            p.to_text(),
            "time\tcomponent\tvalue\n0\t1\t1\n0\t2\t2\n0.5\t1\t3\n0.5\t2\t4\n"
        );
        assert_eq!(p.horizon(), 0.5);
        assert_eq!(grid_steps(1.0, 1e-3).unwrap(), 1000);
        assert!(grid_steps(1.0, 0.3).is_err());
    }

    #[test]
    fn top_eigenvalue() {
        assert_eq!(lambda0(1), 0.0);
        assert_eq!(lambda0(2), -0.5);
        assert_eq!(lambda0(3), -2.0);
    }

    #[test]
    fn drift_is_gradient_of_log_h() {
        let x = [0.3, 1.1, 2.9, 4.0];
        let log_h = |x: &[f64]| crate::config::chord_product(x).ln();
        let b = hbm_drift(&x);
        for l in 0..4 {
            let mut up = x;
            let mut dn = x;
            up[l] += 1e-6;
            dn[l] -= 1e-6;
            assert!((b[l] - (log_h(&up) - log_h(&dn)) / 2e-6).abs() < 1e-6);
        }
        // Antisymmetric pair interaction: total drift vanishes.
        assert!(b.iter().sum::<f64>().abs() < 1e-12);
    }

    #[test]
    fn single_particle_is_plain_brownian_motion() {
        let x0 = AlcovePoint::circle(vec![1.0]).unwrap();
        let p = hbm_simulate(&x0, 0.1, 1e-2, &mut rng::master(5)).unwrap();
        let mut r = rng::master(5);
        let mut x = 1.0;
        for k in 1..=10 {
            x += 0.1 * normal(&mut r);
            assert!((p.value(k)[0] - x).abs() < 1e-15);
        }
    }

    #[test]
    fn hbm_stays_inside_for_three_particles() {
        let x0 = AlcovePoint::circle(vec![0.0, 0.05, 3.0]).unwrap();
        for seed in 0..20 {
            let p = hbm_simulate(&x0, 0.5, 1e-3, &mut rng::master(seed)).unwrap();
            assert!(p.values().iter().all(|v| strictly_inside(v)));
        }
    }

    #[test]
    fn two_particle_sum_is_brownian() {
        let x0 = AlcovePoint::circle(vec![0.2, 1.0]).unwrap();
        let sums = rng::par_replicas(31, 2000, |_, r| {
            hbm_simulate(&x0, 0.5, 1e-3, r).map(|p| p.last().iter().sum::<f64>())
        })
        .unwrap();
        let sd = (2.0f64 * 0.5).sqrt();
        assert!(ks_test(&sums, |v| normal_cdf(v, 1.2, sd)).p_value > 0.01);
    }

    #[test]
    fn skorohod_constant_driver() {
        let u = path(0.1, vec![vec![0.0; 3]; 6]);
        let d = path_skorohod_alcove(&u, &[0.0, 0.5, 0.5], 1.0).unwrap();
        assert!(d.v.values().iter().all(|v| v == &[0.0, 0.5, 0.5]));
        assert!(d.theta.values().iter().all(|v| v.iter().all(|x| *x == 0.0)));
    }

    #[test]
    fn skorohod_rejects_bad_inputs() {
        let u = path(0.1, vec![vec![0.0, 0.0]; 3]);
        assert!(path_skorohod_alcove(&u, &[0.0, 2.0], 1.0).is_err());
        let moved = path(0.1, vec![vec![0.1, 0.0]; 3]);
        assert!(path_skorohod_alcove(&moved, &[0.0, 0.5], 1.0).is_err());
    }

    /// Dense-grid reference for two particles: the gap is clamped to `[0, l]`.
    fn two_particle_reference(u: &GridPath, v0: [f64; 2], l: f64) -> Vec<[f64; 4]> {
        let mut g = v0[1] - v0[0];
        let (mut t1, mut t2) = (0.0, 0.0);
        let mut out = vec![[v0[0], v0[1], 0.0, 0.0]];
        for k in 1..u.len() {
            let du = (u.value(k)[1] - u.value(k - 1)[1]) - (u.value(k)[0] - u.value(k - 1)[0]);
            let w = g + du;
            let (lo, hi) = ((-w).max(0.0), (w - l).max(0.0));
            g = w + lo - hi;
            t1 += lo;
            t2 += hi;
            out.push([v0[0] + u.value(k)[0] - t1, v0[1] + u.value(k)[1] - t2, t1, t2]);
        }
        out
    }

    #[test]
    fn skorohod_zigzag_matches_dense_reference() {
        let steps = 20_000;
        let dt = 1e-4;
        let rows: Vec<Vec<f64>> = (0..=steps)
            .map(|k| {
                let t = k as f64 * dt;
                let tri = |t: f64, period: f64, amp: f64| {
                    let ph = (t / period).fract();
                    amp * if ph < 0.5 { 2.0 * ph } else { 2.0 - 2.0 * ph }
                };
                vec![-tri(t, 0.5, 1.3) + 0.4 * t, tri(t, 0.3, 0.9) - 0.2 * t]
            })
            .collect();
        let u = path(dt, rows);
        let d = path_skorohod_alcove(&u, &[0.0, 0.5], 1.0).unwrap();
        let reference = two_particle_reference(&u, [0.0, 0.5], 1.0);
        for (k, row) in reference.iter().enumerate() {
            let (v, th) = (d.v.value(k), d.theta.value(k));
            for (a, b) in [v[0], v[1], th[0], th[1]].iter().zip(row) {
                assert!((a - b).abs() < 1e-6, "step {k}: {a} vs {b}");
            }
        }
        assert!(d.theta.last()[0] > 0.1 && d.theta.last()[1] > 0.1);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(48))]
        #[test]
        fn skorohod_output_is_admissible(n in 2usize..=5, seed in 0u64..1000, l in 0.5f64..4.0) {
            let dt = 1e-3;
            let u = random_walk(n, 400, dt, seed);
            let v0 = sample_uniform_alcove_h0(n, l, &mut rng::master(seed + 1));
            let d = path_skorohod_alcove(&u, &v0, l).unwrap();
            let ctol = contact_tolerance(dt);
            for t in 0..u.len() {
                prop_assert!(in_alcove(d.v.value(t), l));
                for i in 0..n {
                    let identity = v0[i] + u.value(t)[i] - d.theta.value(t)[i];
                    prop_assert!((d.v.value(t)[i] - identity).abs() < 1e-12);
                    if t > 0 {
                        prop_assert!(d.theta.value(t)[i] >= d.theta.value(t - 1)[i]);
                    }
                }
            }
            prop_assert_eq!(complementarity_residual(&d, l, ctol), 0.0);
        }
    }

    #[test]
    fn gamma_constant_and_single_particle() {
        let y0 = AlcovePoint::circle(vec![0.0, 2.0]).unwrap();
        let x = path(0.1, vec![vec![1.0, 3.0]; 5]);
        let g = gamma_map(&y0, &x, 2.0).unwrap();
        assert!(g.y.values().iter().all(|v| v == &[0.0, 2.0]));

        let y1 = AlcovePoint::circle(vec![0.3]).unwrap();
        let walk = random_walk(1, 200, 1e-3, 4);
        let x1 = path(1e-3, walk.values().iter().map(|v| vec![v[0] + 1.3]).collect());
        let g1 = gamma_map(&y1, &x1, 1.0).unwrap();
        for t in 0..x1.len() {
            assert!((g1.y.value(t)[0] - x1.value(t)[0] + 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn gamma_keeps_interlacing_along_hbm_paths() {
        let y0 = AlcovePoint::circle(vec![-1.0, 1.0]).unwrap();
        let s = 2.0;
        let ok = rng::par_replicas(17, 1000, |_, r| {
            let (x, y) = simulate_gamma_pair(&y0, s, 0.2, 1e-3, r)?;
            Ok::<_, Error>((0..x.len()).all(|t| {
                let xt = AlcovePoint::circle(x.value(t).to_vec()).unwrap();
                let yt = AlcovePoint::circle(y.value(t).to_vec()).unwrap();
                let slack = 1e-9;
                (0..2).all(|i| {
                    let below = if i == 0 { xt.coords()[1] - TAU } else { xt.coords()[0] };
                    yt.coords()[i] >= below - slack && yt.coords()[i] <= xt.coords()[i] + slack
                })
            }))
        })
        .unwrap();
        assert!(ok.into_iter().all(|b| b));
    }

    #[test]
    fn gamma_is_stable_under_grid_refinement() {
        let y0 = AlcovePoint::circle(vec![-1.0, 0.5, 1.5]).unwrap();
        let s = 2.5;
        let mut r = rng::master(8);
        let x0 = sample_q_r(&y0, s, &mut r, DEFAULT_ATTEMPTS).unwrap();
        let fine_dt = 2.5e-4;
        let fine = hbm_simulate(&x0, 0.5, fine_dt, &mut r).unwrap();
        let coarse = fine.subsample(2);
        let yf = gamma_map(&y0, &fine, s).unwrap().y.subsample(2);
        let yc = gamma_map(&y0, &coarse, s).unwrap().y;
        let sup = (0..yc.len())
            .flat_map(|t| {
                yc.value(t)
                    .iter()
                    .zip(yf.value(t))
                    .map(|(a, b)| (a - b).abs())
                    .collect::<Vec<_>>()
            })
            .fold(0.0f64, f64::max);
        assert!(sup <= 5.0 * coarse.dt().sqrt(), "sup difference {sup}");
    }

    #[test]
    fn reflected_bm_stays_in_polytope() {
        let s = 2.0;
        let p = reflected_bm_with_local_time(3, s, 0.5, 1e-3, &mut rng::master(3)).unwrap();
        for v in p.r.values() {
            assert!(in_alcove(v, TAU - s));
            assert!(v.iter().sum::<f64>().abs() < 1e-12);
        }
    }

    #[test]
    fn reflected_bm_is_stationary() {
        let s = PI;
        let ends = rng::par_replicas(12, 400, |_, r| {
            reflected_bm_with_local_time(2, s, 5.0, 2e-3, r).map(|p| p.r.last().to_vec())
        })
        .unwrap();
        let mut r = rng::master(13);
        let uniform: Vec<Vec<f64>> = (0..400).map(|_| sample_uniform_alcove_h0(2, TAU - s, &mut r)).collect();
        assert!(energy_test(&ends, &uniform, 300, &mut r).p_value > 0.01);
    }

    fn random_pair(n: usize, s: f64, seed: u64) -> (AlcovePoint, AlcovePoint) {
        let mut r = rng::master(seed);
        let raw: Vec<f64> = {
            let mut a: Vec<f64> = (0..n).map(|_| r.random::<f64>() * TAU).collect();
            a.sort_by(f64::total_cmp);
            a
        };
        let y = AlcovePoint::circle(raw).unwrap();
        let x = sample_q_r(&y, s, &mut r, DEFAULT_ATTEMPTS).unwrap();
        let c = (x.sum() + y.sum()) / (2.0 * n as f64);
        (x.translated(-c), y.translated(-c))
    }

    #[test]
    fn bead_coordinates_round_trip() {
        for seed in 0..10_000u64 {
            let n = 1 + (seed % 4) as usize;
            let s = 0.3 + 5.5 * ((seed * 7919) % 1000) as f64 / 1000.0;
            let (x, y) = random_pair(n, s, seed);
            let (r, l) = bead_coordinates(&x, &y, s).unwrap();
            assert!(in_alcove(r.coords(), TAU - s) && in_alcove(l.coords(), s));
            if n == 1 {
                assert_eq!(r.coords(), &[0.0]);
                assert_eq!(l.coords(), &[0.0]);
            }
            let (x2, y2) = from_bead_coordinates(&r, &l, s).unwrap();
            for (a, b) in x
                .coords()
                .iter()
                .chain(y.coords())
                .zip(x2.coords().iter().chain(y2.coords()))
            {
                assert!((a - b).abs() <= 1e-12, "seed {seed}");
            }
        }
    }

    #[test]
    fn bead_coordinates_conjugation() {
        for seed in 0..500u64 {
            let n = 2 + (seed % 4) as usize;
            let s = 1.7;
            let (x, y) = random_pair(n, s, seed);
            let (r, l) = bead_coordinates(&x, &y, s).unwrap();
            let (r2, l2) = bead_coordinates(&dagger(&y), &dagger(&x), s).unwrap();
            let rd = dagger_vec(r.coords());
            let ld = ddagger(&l, s);
            for (a, b) in rd.iter().chain(ld.coords()).zip(r2.coords().iter().chain(l2.coords())) {
                assert!((a - b).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn bead_coordinates_reject_non_interlaced() {
        let x = AlcovePoint::circle(vec![-1.5, 2.5]).unwrap();
        let y = AlcovePoint::circle(vec![-0.8, -0.2]).unwrap();
        assert!(bead_coordinates(&x, &y, 2.0).is_err());
    }

    #[test]
    fn reflection_geometry_matches_closed_form_and_is_skew() {
        for n in 2..=6 {
            let g = reflection_geometry(n);
            let nf = n as f64;
            for i in 0..n {
                assert!((dot(&g.normals[i], &g.directions[i]) - 1.0).abs() < 1e-12);
                for j in 0..n {
                    let expect = if j == i || j == (i + 1) % n {
                        2f64.sqrt() / nf - 1.0 / 2f64.sqrt()
                    } else {
                        2f64.sqrt() / nf
                    };
                    assert!((g.tangential[i][j] - expect).abs() < 1e-12);
                }
            }
            assert!(skew_symmetry_residual(&g) < 1e-12);
        }
    }

    #[test]
    fn interval_reflection_without_contact() {
        let f: Vec<f64> = (0..50).map(|k| 0.01 * k as f64).collect();
        let out = interval_reflection_formulas(&f, 1.0).unwrap();
        assert!(out.z_iter.iter().zip(&f).all(|(z, v)| (z - v).abs() < 1e-12));
        assert!(out.max_disagreement() < 1e-12);
        assert!(out.lower.iter().chain(&out.upper).all(|v| *v == 0.0));
    }

    #[test]
    fn interval_reflection_sawtooth() {
        // f(t) = 2t on t ∈ [0, 2]: Z rises to 1 and is held there.
        let f: Vec<f64> = (0..=200).map(|k| 2.0 * k as f64 / 100.0).collect();
        let out = interval_reflection_formulas(&f, 1.0).unwrap();
        for (k, z) in out.z_iter.iter().enumerate() {
            let t = k as f64 / 100.0;
            assert!((z - (2.0 * t).min(1.0)).abs() < 1e-12);
            assert!((out.upper[k] - (2.0 * t - 1.0).max(0.0)).abs() < 1e-12);
        }
        assert!(out.max_disagreement() < 1e-9);
        // Descending afterwards reflects at 0.
        let g: Vec<f64> = (0..=300)
            .map(|k| {
                if k <= 100 {
                    0.02 * k as f64
                } else {
                    2.0 - 0.02 * (k - 100) as f64
                }
            })
            .collect();
        let out = interval_reflection_formulas(&g, 1.0).unwrap();
        assert!((out.z_iter[150] - 0.0).abs() < 1e-12 && (out.z_iter[300]).abs() < 1e-12);
        assert!(out.max_disagreement() < 1e-9);
    }

    #[test]
    fn interval_reflection_random_paths_agree() {
        let mut r = rng::master(99);
        for _ in 0..200 {
            let m = 2 + (r.random::<u32>() % 120) as usize;
            let mut f = vec![r.random::<f64>()];
            for _ in 1..m {
                let last = *f.last().unwrap();
                f.push(last + 0.6 * normal(&mut r));
            }
            let out = interval_reflection_formulas(&f, 1.0).unwrap();
            assert!(out.max_disagreement() < 1e-9);
        }
    }

    #[test]
    fn bridge_survival_matches_simulation() {
        let (x, z, p, t) = (0.8, 0.6, 1.0, 0.1);
        let mut r = rng::master(4);
        let m = 4000;
        let sub = 2000;
        let h = t / sub as f64;
        let mut alive = 0;
        for _ in 0..m {
            // Bridge by pinning a fine random walk.
            let mut w = vec![0.0; sub + 1];
            for k in 1..=sub {
                w[k] = w[k - 1] + h.sqrt() * normal(&mut r);
            }
            let ok = (0..=sub).all(|k| {
                let frac = k as f64 / sub as f64;
                let b = x + frac * (z - x) + w[k] - frac * w[sub];
                b.abs() < p
            });
            alive += ok as usize;
        }
        let est = alive as f64 / m as f64;
        let exact = bridge_survival(x, z, p, t);
        // The fine grid misses short excursions, so the walk survives slightly more.
        assert!(est >= exact - 0.03 && est - exact < 0.05, "{est} vs {exact}");
    }

    #[test]
    fn conditioned_cdf_matches_image_density() {
        let (y, p, t) = (0.4, 1.5, 0.3);
        let rate = PI * PI / (8.0 * p * p);
        let density = |z: f64| {
            let mut killed = 0.0;
            for k in -6i32..=6 {
                let sh = 4.0 * k as f64 * p;
                let g = |d: f64| (-d * d / (2.0 * t)).exp() / (TAU * t).sqrt();
                killed += g(z - y + sh) - g(z + y + 2.0 * p + sh);
            }
            (rate * t).exp() * interval_ground_state(z, p) / interval_ground_state(y, p) * killed
        };
        for z in [-1.2, -0.3, 0.0, 0.5, 1.4] {
            let q = crate::quadrature::integrate(density, -p, z, Default::default()).unwrap();
            assert!((q - conditioned_bm_cdf(y, z, p, t).unwrap()).abs() < 1e-8);
        }
        assert_eq!(conditioned_bm_cdf(y, -p, p, t).unwrap(), 0.0);
        assert!((conditioned_bm_cdf(y, p - 1e-12, p, t).unwrap() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn interval_coupling_starts_at_y_and_stays_inside() {
        let c = IntervalCoupling {
            p: PI,
            a: 2.0,
            y: 0.5,
            horizon: 0.5,
            dt: 1e-3,
        };
        let (lo, hi) = c.initial_support();
        assert!((hi - lo - 2.0 * c.a).abs() < 1e-12);
        let mut r = rng::master(2);
        for _ in 0..50 {
            let run = simulate_interval_coupling(&c, &mut r).unwrap();
            assert_eq!(run.y[0], c.y);
            assert!(run.z.iter().all(|z| (0.0..=c.a).contains(z)));
            assert!(run.y.iter().all(|y| y.abs() <= c.p));
            assert!(run.x[0] >= lo && run.x[0] <= hi);
        }
    }

    #[test]
    fn interval_coupling_small_samples() {
        let c = IntervalCoupling {
            p: PI,
            a: 2.0,
            y: 0.5,
            horizon: 1.0,
            dt: 1e-3,
        };
        let rep = verify_n2_coupling(&c, 3000, 21).unwrap();
        assert!(rep.ks.p_value > 0.01, "{rep:?}");
        assert_eq!(rep.start_error, 0.0);
        let free = IntervalCoupling {
            p: 50.0,
            a: 1.0,
            y: 0.0,
            horizon: 1.0,
            dt: 1e-3,
        };
        let rep = verify_n2_coupling(&free, 3000, 22).unwrap();
        assert!(rep.ks_free.p_value > 0.01, "{rep:?}");
    }

    #[test]
    fn time_reversal_small_sample() {
        let rep = verify_time_reversal(2, PI, 1.0, 1e-3, 3000, 5).unwrap();
        assert!(rep.kept > 500);
        assert!(rep.max_abs_z() < 3.5, "{rep:?}");
    }
}
