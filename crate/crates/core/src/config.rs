//! Configuration types shared by every model: points on the circle, alcove
//! points with their periodic extension, lattice configurations, and the
//! Vandermonde-type weights built from them.

use std::f64::consts::TAU;

use crate::error::{Error, Result};

/// Absolute tolerance for interval membership and sum checks, per particle.
pub const EQ_TOL: f64 = 1e-12;

pub fn tolerance(n: usize) -> f64 {
    EQ_TOL * n.max(1) as f64
}

/// An unlabelled configuration of points on the unit circle, stored as
/// sorted angles in `[0, 2π)`.
#[derive(Debug, Clone, PartialEq)]
pub struct CircleConfig {
    angles: Vec<f64>,
}

impl CircleConfig {
    /// Accepts angles already in canonical form.
    pub fn new(angles: Vec<f64>) -> Result<Self> {
        if angles.is_empty() {
            return Err(Error::InvalidConfig("empty circle configuration".into()));
        }
        if angles.iter().any(|a| !a.is_finite() || *a < 0.0 || *a >= TAU) {
            return Err(Error::InvalidConfig(format!("angles must lie in [0, 2π): {angles:?}")));
        }
        if angles.windows(2).any(|w| w[0] > w[1]) {
            return Err(Error::InvalidConfig(format!("angles not sorted: {angles:?}")));
        }
        Ok(Self { angles })
    }

    /// Reduces arbitrary real angles mod 2π and sorts them.
    pub fn from_angles<I: IntoIterator<Item = f64>>(angles: I) -> Result<Self> {
        let mut reduced: Vec<f64> = angles.into_iter().map(wrap_angle).collect();
        if reduced.iter().any(|a| !a.is_finite()) {
            return Err(Error::InvalidConfig("non-finite angle".into()));
        }
        reduced.sort_by(f64::total_cmp);
        Self::new(reduced)
    }

    pub fn angles(&self) -> &[f64] {
        &self.angles
    }

    pub fn n(&self) -> usize {
        self.angles.len()
    }

    pub fn rotated(&self, shift: f64) -> Self {
        Self::from_angles(self.angles.iter().map(|a| a + shift)).expect("rotation of a valid config")
    }
}

/// Reduces an angle into `[0, 2π)`.
pub fn wrap_angle(a: f64) -> f64 {
    let r = a.rem_euclid(TAU);
    if r >= TAU {
        0.0
    } else {
        r
    }
}

/// A point of the alcove `{x_1 ≤ … ≤ x_n ≤ x_1 + period}`.
///
/// Indices are 1-based and extend periodically: `x_{i+n} = x_i + period`.
#[derive(Debug, Clone, PartialEq)]
pub struct AlcovePoint {
    coords: Vec<f64>,
    period: f64,
}

impl AlcovePoint {
    pub fn new(coords: Vec<f64>, period: f64) -> Result<Self> {
        let n = coords.len();
        if n == 0 {
            return Err(Error::InvalidConfig("empty alcove point".into()));
        }
        if !(period > 0.0) || coords.iter().any(|c| !c.is_finite()) {
            return Err(Error::InvalidConfig("non-finite coordinates or period".into()));
        }
        let tol = tolerance(n) * (1.0 + coords.iter().fold(0.0f64, |m, c| m.max(c.abs())));
        if coords.windows(2).any(|w| w[0] > w[1] + tol) {
            return Err(Error::InvalidConfig(format!("alcove point not ordered: {coords:?}")));
        }
        if coords[n - 1] - coords[0] > period + tol {
            return Err(Error::InvalidConfig(format!(
                "alcove point spans more than one period ({period}): {coords:?}"
            )));
        }
        Ok(Self { coords, period })
    }

    /// Alcove point of the circle, period 2π.
    pub fn circle(coords: Vec<f64>) -> Result<Self> {
        Self::new(coords, TAU)
    }

    pub fn coords(&self) -> &[f64] {
        &self.coords
    }

    pub fn into_coords(self) -> Vec<f64> {
        self.coords
    }

    pub fn period(&self) -> f64 {
        self.period
    }

    pub fn n(&self) -> usize {
        self.coords.len()
    }

    pub fn sum(&self) -> f64 {
        self.coords.iter().sum()
    }

    /// Periodically extended coordinate `x_i` for any integer `i` (1-based).
    pub fn at(&self, i: isize) -> f64 {
        extended(&self.coords, self.period, i)
    }

    /// Closed gap `[x_i, x_{i+1}]`, 1-based.
    pub fn gap(&self, i: isize) -> (f64, f64) {
        (self.at(i), self.at(i + 1))
    }

    /// Image on the circle (only meaningful for period 2π).
    pub fn to_circle(&self) -> CircleConfig {
        CircleConfig::from_angles(self.coords.iter().copied()).expect("finite coordinates")
    }

    pub fn translated(&self, c: f64) -> Self {
        Self {
            coords: self.coords.iter().map(|x| x + c).collect(),
            period: self.period,
        }
    }
}

/// `x_i` of the periodic extension `x_{i+n} = x_i + period` (1-based `i`).
pub fn extended(coords: &[f64], period: f64, i: isize) -> f64 {
    let n = coords.len() as isize;
    let k = (i - 1).div_euclid(n);
    let j = (i - 1).rem_euclid(n) as usize;
    coords[j] + k as f64 * period
}

/// `n` distinct sites on the discrete circle `Z_N`, sorted.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct DiscreteConfig {
    sites: Vec<usize>,
    modulus: usize,
}

impl DiscreteConfig {
    pub fn new(sites: Vec<usize>, modulus: usize) -> Result<Self> {
        if sites.is_empty() || sites.len() > modulus {
            return Err(Error::InvalidConfig(format!(
                "need 1 ≤ n ≤ N, got n={} N={modulus}",
                sites.len()
            )));
        }
        if sites.iter().any(|&s| s >= modulus) || sites.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidConfig(format!(
                "sites must be strictly increasing in [0, {modulus}): {sites:?}"
            )));
        }
        Ok(Self { sites, modulus })
    }

    /// Reduces sites mod `N` and sorts; rejects coincident sites.
    pub fn from_sites<I: IntoIterator<Item = i64>>(sites: I, modulus: usize) -> Result<Self> {
        let mut s: Vec<usize> = sites
            .into_iter()
            .map(|k| k.rem_euclid(modulus as i64) as usize)
            .collect();
        s.sort_unstable();
        Self::new(s, modulus)
    }

    pub fn sites(&self) -> &[usize] {
        &self.sites
    }

    pub fn modulus(&self) -> usize {
        self.modulus
    }

    pub fn n(&self) -> usize {
        self.sites.len()
    }

    pub fn contains(&self, site: usize) -> bool {
        self.sites.binary_search(&site).is_ok()
    }

    pub fn angles(&self) -> Vec<f64> {
        let step = TAU / self.modulus as f64;
        self.sites.iter().map(|&k| k as f64 * step).collect()
    }
}

/// An integer point of the lattice alcove `{x_1 ≤ … ≤ x_n ≤ x_1 + N}`.
///
/// Coordinates count lattice steps of size `2π/N`. Points that differ by the
/// relabelling `(x_1, …, x_n) ↦ (x_2, …, x_n, x_1 + N)` describe the same
/// configuration; the canonical representative holds the sorted residues.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct LatticePoint {
    coords: Vec<i64>,
    modulus: usize,
}

impl LatticePoint {
    pub fn new(coords: Vec<i64>, modulus: usize) -> Result<Self> {
        let n = coords.len();
        if n == 0 || modulus == 0 {
            return Err(Error::InvalidConfig("empty lattice point".into()));
        }
        if coords.windows(2).any(|w| w[0] > w[1]) || coords[n - 1] - coords[0] > modulus as i64 {
            return Err(Error::InvalidConfig(format!(
                "not a lattice alcove point for N={modulus}: {coords:?}"
            )));
        }
        Ok(Self { coords, modulus })
    }

    pub fn coords(&self) -> &[i64] {
        &self.coords
    }

    pub fn modulus(&self) -> usize {
        self.modulus
    }

    pub fn n(&self) -> usize {
        self.coords.len()
    }

    pub fn sum(&self) -> i64 {
        self.coords.iter().sum()
    }

    pub fn at(&self, i: isize) -> i64 {
        let n = self.coords.len() as isize;
        let k = (i - 1).div_euclid(n);
        let j = (i - 1).rem_euclid(n) as usize;
        self.coords[j] + k as i64 * self.modulus as i64
    }

    pub fn canonical(&self) -> Self {
        let m = self.modulus as i64;
        let mut c: Vec<i64> = self.coords.iter().map(|x| x.rem_euclid(m)).collect();
        c.sort_unstable();
        Self {
            coords: c,
            modulus: self.modulus,
        }
    }

    /// The lift of this configuration whose coordinate sum equals `sum`, if any.
    pub fn lift_with_sum(&self, sum: i64) -> Option<Self> {
        let base = self.canonical();
        let n = base.n() as i64;
        let m = self.modulus as i64;
        let diff = sum - base.sum();
        if diff.rem_euclid(m) != 0 {
            return None;
        }
        // Relabelling k times adds k·N to the sum.
        let k = diff / m;
        let (q, r) = (k.div_euclid(n), k.rem_euclid(n) as usize);
        let mut coords: Vec<i64> = (0..base.n())
            .map(|j| {
                let idx = j + r;
                let wrap = (idx / base.n()) as i64;
                base.coords[idx % base.n()] + (wrap + q) * m
            })
            .collect();
        coords.sort_unstable();
        Some(Self {
            coords,
            modulus: self.modulus,
        })
    }
}

/// A vector of the hyperplane `{Σ x_i = level}`.
#[derive(Debug, Clone, PartialEq)]
pub struct HyperplaneVector {
    coords: Vec<f64>,
    level: f64,
}

impl HyperplaneVector {
    pub fn new(coords: Vec<f64>, level: f64) -> Result<Self> {
        let n = coords.len();
        let scale = 1.0 + coords.iter().fold(0.0f64, |m, c| m.max(c.abs()));
        let sum: f64 = coords.iter().sum();
        if (sum - level).abs() > tolerance(n) * scale {
            return Err(Error::InvalidConfig(format!(
                "coordinates sum to {sum}, expected {level}"
            )));
        }
        Ok(Self { coords, level })
    }

    pub fn coords(&self) -> &[f64] {
        &self.coords
    }

    pub fn level(&self) -> f64 {
        self.level
    }

    pub fn n(&self) -> usize {
        self.coords.len()
    }
}

/// Orthogonal projection onto `Σ x_i = 0`.
pub fn project_h0(x: &[f64]) -> HyperplaneVector {
    let mean = x.iter().sum::<f64>() / x.len().max(1) as f64;
    HyperplaneVector {
        coords: x.iter().map(|v| v - mean).collect(),
        level: 0.0,
    }
}

/// `∏_{l<m} |e^{iθ_l} − e^{iθ_m}|` for raw angles (any order, any lift).
pub fn chord_product(angles: &[f64]) -> f64 {
    let mut p = 1.0;
    for l in 0..angles.len() {
        for m in l + 1..angles.len() {
            p *= 2.0 * (0.5 * (angles[m] - angles[l])).sin().abs();
        }
    }
    p
}

pub fn vandermonde_delta(c: &CircleConfig) -> f64 {
    chord_product(c.angles())
}

pub fn discrete_delta(c: &DiscreteConfig) -> f64 {
    chord_product(&c.angles())
}

/// Positive eigenfunction of the lattice interlacing kernels.
///
/// Site `x_j + j` on the circle with `N + n` positions: the lattice walk seen
/// as `n` non-colliding walkers.
pub fn discrete_h(x: &LatticePoint) -> f64 {
    let big = (x.modulus() + x.n()) as f64;
    let angles: Vec<f64> = x
        .coords()
        .iter()
        .enumerate()
        .map(|(j, &c)| TAU * (c + j as i64 + 1) as f64 / big)
        .collect();
    chord_product(&angles)
}

/// `x ≼_r x'`: `x'_i ∈ [x_i, x_{i+1}]` for every `i` and `Σ (x'_i − x_i) = r`.
pub fn r_interlaced(x: &AlcovePoint, x2: &AlcovePoint, r: f64) -> bool {
    let n = x.n();
    if x2.n() != n || (x.period() - x2.period()).abs() > EQ_TOL {
        return false;
    }
    let tol = tolerance(n);
    let within = (1..=n as isize).all(|i| {
        let (lo, hi) = x.gap(i);
        let v = x2.at(i);
        v >= lo - tol && v <= hi + tol
    });
    within && (x2.sum() - x.sum() - r).abs() <= tol * (1.0 + r.abs())
}

/// Outcome of the half-open interlacing comparison used by the bead model.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WeakInterlace {
    /// `a_1 ≤ b_1 < a_2 ≤ … < a_n ≤ b_n`
    Prec,
    /// `b_1 < a_1 ≤ b_2 < … ≤ b_n < a_n`
    Succ,
    Neither,
}

/// Exact (tolerance-free) classification: ties decide between the cases.
pub fn weak_interlace(a: &CircleConfig, b: &CircleConfig) -> WeakInterlace {
    let (a, b) = (a.angles(), b.angles());
    let n = a.len();
    assert_eq!(n, b.len(), "configurations of different sizes");
    let prec = (0..n).all(|j| a[j] <= b[j] && (j + 1 == n || b[j] < a[j + 1]));
    if prec {
        return WeakInterlace::Prec;
    }
    let succ = (0..n).all(|j| b[j] < a[j] && (j + 1 == n || a[j] <= b[j + 1]));
    if succ {
        WeakInterlace::Succ
    } else {
        WeakInterlace::Neither
    }
}

/// Total anticlockwise displacement `l(y, z)` from `y` to a weakly interlaced `z`.
pub fn winding_length(y: &CircleConfig, z: &CircleConfig) -> Result<f64> {
    if weak_interlace(y, z) == WeakInterlace::Neither {
        return Err(Error::NotInterlaced(format!("{:?} and {:?}", y.angles(), z.angles())));
    }
    let s: f64 = z.angles().iter().zip(y.angles()).map(|(b, a)| b - a).sum();
    Ok(if s >= 0.0 { s } else { s + TAU })
}

/// `x†_i = −x_{n+1−i}`: reverses orientation, and `x ≼_r y` implies `y† ≼_r x†`.
pub fn dagger(x: &AlcovePoint) -> AlcovePoint {
    AlcovePoint {
        coords: x.coords().iter().rev().map(|v| -v).collect(),
        period: x.period(),
    }
}

/// `x‡_i = −x_{n−i} − s/n` for `i < n` and `x‡_n = −x_n + s(n−1)/n`; maps
/// `H_0 ∩ A_n(s)` to itself.
pub fn ddagger(x: &HyperplaneVector, s: f64) -> HyperplaneVector {
    let n = x.n();
    let c = x.coords();
    let nf = n as f64;
    let mut out: Vec<f64> = (1..n).map(|i| -c[n - i - 1] - s / nf).collect();
    out.push(-c[n - 1] + s * (nf - 1.0) / nf);
    let level = -x.level();
    HyperplaneVector { coords: out, level }
}

/// Membership in `A_n(l)` within tolerance.
pub fn in_alcove(x: &[f64], l: f64) -> bool {
    let n = x.len();
    let tol = tolerance(n) * (1.0 + x.iter().fold(0.0f64, |m, v| m.max(v.abs())));
    x.windows(2).all(|w| w[0] <= w[1] + tol) && x[n - 1] - x[0] <= l + tol
}
