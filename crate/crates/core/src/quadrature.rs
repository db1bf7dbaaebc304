//! Globally adaptive Gauss–Kronrod (7/15) quadrature for real and complex
//! integrands, with nesting helpers for low-dimensional boxes.

use std::cell::RefCell;
use std::collections::BinaryHeap;

use num_complex::Complex64;

use crate::error::{Error, Result};

const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_8,
];
// Gauss weights for the nodes XGK[1], XGK[3], XGK[5], XGK[7].
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

#[derive(Debug, Clone, Copy)]
pub struct QuadOptions {
    pub abs_tol: f64,
    pub rel_tol: f64,
    pub max_intervals: usize,
}

impl Default for QuadOptions {
    fn default() -> Self {
        Self {
            abs_tol: 1e-13,
            rel_tol: 1e-11,
            max_intervals: 4000,
        }
    }
}

impl QuadOptions {
    pub fn with_tol(abs_tol: f64, rel_tol: f64) -> Self {
        Self {
            abs_tol,
            rel_tol,
            ..Self::default()
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct QuadResult {
    pub value: Complex64,
    pub error: f64,
    pub intervals: usize,
}

struct Piece {
    a: f64,
    b: f64,
    value: Complex64,
    error: f64,
}

impl PartialEq for Piece {
    fn eq(&self, o: &Self) -> bool {
        self.error == o.error
    }
}
impl Eq for Piece {}
impl PartialOrd for Piece {
    fn partial_cmp(&self, o: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(o))
    }
}
impl Ord for Piece {
    fn cmp(&self, o: &Self) -> std::cmp::Ordering {
        self.error.total_cmp(&o.error)
    }
}

fn gk15(f: &mut impl FnMut(f64) -> Complex64, a: f64, b: f64) -> (Complex64, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut kron = fc * WGK[7];
    let mut gauss = fc * WG[3];
    for j in 0..7 {
        let dx = h * XGK[j];
        let s = f(c - dx) + f(c + dx);
        kron += s * WGK[j];
        if j % 2 == 1 {
            gauss += s * WG[j / 2];
        }
    }
    let value = kron * h;
    let err = ((kron - gauss) * h).norm();
    (value, err)
}

/// Integrates `f` over `[a, b]`, first splitting at the given interior breakpoints.
pub fn integrate_complex_with_breaks(
    mut f: impl FnMut(f64) -> Complex64,
    a: f64,
    b: f64,
    breaks: &[f64],
    opts: QuadOptions,
) -> Result<QuadResult> {
    if a == b {
        return Ok(QuadResult {
            value: Complex64::new(0.0, 0.0),
            error: 0.0,
            intervals: 0,
        });
    }
    let (lo, hi, sign) = if a < b { (a, b, 1.0) } else { (b, a, -1.0) };
    let mut cuts = vec![lo];
    let mut inner: Vec<f64> = breaks.iter().copied().filter(|&x| x > lo && x < hi).collect();
    inner.sort_by(f64::total_cmp);
    cuts.extend(inner);
    cuts.push(hi);

    let mut heap = BinaryHeap::new();
    let mut total = Complex64::new(0.0, 0.0);
    let mut err = 0.0;
    for w in cuts.windows(2) {
        let (v, e) = gk15(&mut f, w[0], w[1]);
        total += v;
        err += e;
        heap.push(Piece {
            a: w[0],
            b: w[1],
            value: v,
            error: e,
        });
    }
    while err > opts.abs_tol.max(opts.rel_tol * total.norm()) {
        if heap.len() >= opts.max_intervals {
            return Err(Error::Quadrature(format!(
                "error estimate {err:e} above tolerance after {} intervals",
                heap.len()
            )));
        }
        let worst = heap.pop().expect("nonempty heap");
        let mid = 0.5 * (worst.a + worst.b);
        if !(mid > worst.a && mid < worst.b) {
            return Err(Error::Quadrature("interval width underflow".into()));
        }
        let (v1, e1) = gk15(&mut f, worst.a, mid);
        let (v2, e2) = gk15(&mut f, mid, worst.b);
        total += v1 + v2 - worst.value;
        err += e1 + e2 - worst.error;
        heap.push(Piece {
            a: worst.a,
            b: mid,
            value: v1,
            error: e1,
        });
        heap.push(Piece {
            a: mid,
            b: worst.b,
            value: v2,
            error: e2,
        });
    }
    // Re-sum to shed the drift of the running updates.
    let value: Complex64 = heap.iter().map(|p| p.value).sum();
    let error: f64 = heap.iter().map(|p| p.error).sum();
    Ok(QuadResult {
        value: value * sign,
        error,
        intervals: heap.len(),
    })
}

pub fn integrate_complex(f: impl FnMut(f64) -> Complex64, a: f64, b: f64, opts: QuadOptions) -> Result<QuadResult> {
    integrate_complex_with_breaks(f, a, b, &[], opts)
}

pub fn integrate(mut f: impl FnMut(f64) -> f64, a: f64, b: f64, opts: QuadOptions) -> Result<f64> {
    integrate_complex(|x| Complex64::new(f(x), 0.0), a, b, opts).map(|r| r.value.re)
}

/// Iterated integral over a box whose inner limits may depend on the outer
/// variables. `limits(k, prefix)` returns the range and breakpoints of
/// coordinate `k` given the already fixed coordinates `prefix`.
pub fn integrate_nested(
    dim: usize,
    limits: &dyn Fn(usize, &[f64]) -> (f64, f64, Vec<f64>),
    f: &dyn Fn(&[f64]) -> Complex64,
    opts: QuadOptions,
) -> Result<Complex64> {
    let failure: RefCell<Option<Error>> = RefCell::new(None);
    let mut prefix = Vec::with_capacity(dim);
    let v = nested_level(0, dim, &mut prefix, limits, f, opts, &failure);
    match failure.into_inner() {
        Some(e) => Err(e),
        None => Ok(v),
    }
}

fn nested_level(
    k: usize,
    dim: usize,
    prefix: &mut Vec<f64>,
    limits: &dyn Fn(usize, &[f64]) -> (f64, f64, Vec<f64>),
    f: &dyn Fn(&[f64]) -> Complex64,
    opts: QuadOptions,
    failure: &RefCell<Option<Error>>,
) -> Complex64 {
    if k == dim {
        return f(prefix);
    }
    let (a, b, breaks) = limits(k, prefix);
    let snapshot = prefix.clone();
    let res = integrate_complex_with_breaks(
        |x| {
            let mut p = snapshot.clone();
            p.push(x);
            nested_level(k + 1, dim, &mut p, limits, f, opts, failure)
        },
        a,
        b,
        &breaks,
        opts,
    );
    match res {
        Ok(r) => r.value,
        Err(e) => {
            failure.borrow_mut().get_or_insert(e);
            Complex64::new(0.0, 0.0)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn polynomial_and_oscillatory() {
        let o = QuadOptions::default();
        let v = integrate(|x| x.powi(5), 0.0, 2.0, o).unwrap();
        assert!((v - 64.0 / 6.0).abs() < 1e-12);
        let v = integrate(|x| (7.0 * x).cos(), 0.0, PI / 2.0, o).unwrap();
        assert!((v - (7.0 * PI / 2.0).sin() / 7.0).abs() < 1e-12);
        let v = integrate(|x| x.sqrt(), 0.0, 1.0, o).unwrap();
        assert!((v - 2.0 / 3.0).abs() < 1e-10);
    }

    #[test]
    fn reversed_limits_flip_sign() {
        let v = integrate(|x| x, 1.0, 0.0, QuadOptions::default()).unwrap();
        assert!((v + 0.5).abs() < 1e-14);
    }

    #[test]
    fn kink_with_breakpoint() {
        let r = integrate_complex_with_breaks(
            |x| Complex64::new((x - 0.3).abs(), 0.0),
            0.0,
            1.0,
            &[0.3],
            QuadOptions::default(),
        )
        .unwrap();
        assert!((r.value.re - (0.045 + 0.245)).abs() < 1e-14);
        assert_eq!(r.intervals, 2);
    }

    #[test]
    fn nested_triangle() {
        // ∫_0^1 ∫_0^x y dy dx = 1/6
        let v = integrate_nested(
            2,
            &|k, p| {
                if k == 0 {
                    (0.0, 1.0, vec![])
                } else {
                    (0.0, p[0], vec![])
                }
            },
            &|p| Complex64::new(p[1], 0.0),
            QuadOptions::default(),
        )
        .unwrap();
        assert!((v.re - 1.0 / 6.0).abs() < 1e-13);
    }
}
