//! Particles on the integer line: Gelfand–Tsetlin patterns driven by the
//! RSK-type update, and the Vandermonde-conditioned top-row chain.

use std::collections::{BTreeMap, HashMap};

use rand::Rng;

use crate::error::{Error, Result};
use crate::matrix::DenseMatrix;

pub type LineConfig = Vec<i64>;

fn strictly_increasing(x: &[i64]) -> bool {
    x.windows(2).all(|w| w[0] < w[1])
}

/// `x ⪯ y` for `x ∈ E_m`, `y ∈ E_{m+1}`: `y_j < x_j ≤ y_{j+1}`.
pub fn line_interlaced(x: &[i64], y: &[i64]) -> bool {
    y.len() == x.len() + 1 && (0..x.len()).all(|j| y[j] < x[j] && x[j] <= y[j + 1])
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct GtPattern {
    rows: Vec<LineConfig>,
}

impl GtPattern {
    pub fn new(rows: Vec<LineConfig>) -> Result<Self> {
        for (m, row) in rows.iter().enumerate() {
            if row.len() != m + 1 || !strictly_increasing(row) {
                return Err(Error::InvalidConfig(format!(
                    "row {} is not in E_{}: {row:?}",
                    m + 1,
                    m + 1
                )));
            }
        }
        if rows.windows(2).any(|w| !line_interlaced(&w[0], &w[1])) {
            return Err(Error::NotInterlaced(format!("{rows:?}")));
        }
        Ok(Self { rows })
    }

    /// `((0), (−1, 0), …, (−n+1, …, 0))`.
    pub fn null(n: usize) -> Self {
        Self {
            rows: (1..=n).map(|m| (-(m as i64) + 1..=0).collect()).collect(),
        }
    }

    pub fn depth(&self) -> usize {
        self.rows.len()
    }

    pub fn rows(&self) -> &[LineConfig] {
        &self.rows
    }

    pub fn top(&self) -> &LineConfig {
        self.rows.last().expect("nonempty pattern")
    }

    pub fn is_valid(&self) -> bool {
        Self::new(self.rows.clone()).is_ok()
    }
}

/// Propagates the move `x → x_new` (one particle, one step right) to the row
/// above: the first particle of `y` right of `y_j` that can step without
/// breaking interlacing moves.
pub fn line_phi(x: &[i64], y: &[i64], x_new: &[i64]) -> Result<LineConfig> {
    if !line_interlaced(x, y) {
        return Err(Error::NotInterlaced(format!("{x:?} vs {y:?}")));
    }
    let diff: Vec<usize> = (0..x.len()).filter(|&i| x_new[i] != x[i]).collect();
    if x_new.len() != x.len() || diff.len() != 1 || x_new[diff[0]] != x[diff[0]] + 1 || !strictly_increasing(x_new) {
        return Err(Error::Precondition(format!("{x_new:?} is not a unit move of {x:?}")));
    }
    let j = diff[0];
    let m = x.len();
    let k = (j + 1..=m)
        .find(|&l| l == m || y[l] + 1 < x_new[l])
        .expect("the rightmost particle can always move");
    let mut out = y.to_vec();
    out[k] += 1;
    Ok(out)
}

/// `g(p, m)` with 1-based `m`.
pub fn gt_update(p: &GtPattern, m: usize) -> GtPattern {
    assert!((1..=p.depth()).contains(&m), "level out of range");
    let mut rows = p.rows.clone();
    let row = &p.rows[m - 1];
    let j = (0..m)
        .find(|&j| j + 1 == m || row[j] + 1 < p.rows[m - 2][j])
        .expect("the last particle can always move");
    rows[m - 1][j] += 1;
    for l in m..p.depth() {
        rows[l] = line_phi(&p.rows[l - 1], &p.rows[l], &rows[l - 1]).expect("update preserves interlacing");
    }
    GtPattern { rows }
}

pub fn gt_step<R: Rng + ?Sized>(p: &GtPattern, rng: &mut R) -> GtPattern {
    let m = rng.random_range(1..=p.depth());
    gt_update(p, m)
}

/// `h(x) = ∏_{i<j} (x_j − x_i)`.
pub fn line_h(x: &[i64]) -> f64 {
    let mut p = 1.0;
    for i in 0..x.len() {
        for j in i + 1..x.len() {
            p *= (x[j] - x[i]) as f64;
        }
    }
    p
}

/// Nonzero entries of the row `P_n(x, ·)`.
pub fn pn_row(x: &[i64]) -> Vec<(LineConfig, f64)> {
    let n = x.len() as f64;
    let hx = line_h(x);
    (0..x.len())
        .filter_map(|j| {
            let mut y = x.to_vec();
            y[j] += 1;
            strictly_increasing(&y).then(|| {
                let p = line_h(&y) / (n * hx);
                (y, p)
            })
        })
        .collect()
}

/// `P_n` restricted to configurations inside `[lo, hi]`.
#[derive(Debug, Clone)]
pub struct WindowKernel {
    pub states: Vec<LineConfig>,
    pub matrix: DenseMatrix<f64>,
    /// States whose row loses mass through the right edge of the window.
    pub leaking: Vec<usize>,
}

pub fn pn_kernel(n: usize, lo: i64, hi: i64) -> WindowKernel {
    let mut states = Vec::new();
    let mut cur = Vec::with_capacity(n);
    enumerate_increasing(n, lo, hi, &mut cur, &mut states);
    let index: HashMap<LineConfig, usize> = states.iter().cloned().enumerate().map(|(i, s)| (s, i)).collect();
    let mut matrix = DenseMatrix::zeros(states.len());
    let mut leaking = Vec::new();
    for (i, x) in states.iter().enumerate() {
        let mut leaked = false;
        for (y, p) in pn_row(x) {
            match index.get(&y) {
                Some(&j) => matrix.set(i, j, p),
                None => leaked = true,
            }
        }
        if leaked {
            leaking.push(i);
        }
    }
    WindowKernel {
        states,
        matrix,
        leaking,
    }
}

fn enumerate_increasing(n: usize, lo: i64, hi: i64, cur: &mut Vec<i64>, out: &mut Vec<LineConfig>) {
    if cur.len() == n {
        out.push(cur.clone());
        return;
    }
    let start = cur.last().map_or(lo, |v| v + 1);
    for v in start..=hi {
        cur.push(v);
        enumerate_increasing(n, lo, hi, cur, out);
        cur.pop();
    }
}

/// All patterns with a prescribed top row.
pub fn patterns_with_top(top: &[i64]) -> Vec<GtPattern> {
    let mut out = Vec::new();
    let mut rows = vec![top.to_vec()];
    fill_below(&mut rows, &mut out);
    out
}

fn fill_below(rows: &mut Vec<LineConfig>, out: &mut Vec<GtPattern>) {
    let y = rows.last().expect("nonempty").clone();
    if y.len() == 1 {
        let mut r = rows.clone();
        r.reverse();
        out.push(GtPattern { rows: r });
        return;
    }
    let mut cur = Vec::new();
    let mut below = Vec::new();
    rows_below(&y, &mut cur, &mut below);
    for x in below {
        rows.push(x);
        fill_below(rows, out);
        rows.pop();
    }
}

fn rows_below(y: &[i64], cur: &mut Vec<i64>, out: &mut Vec<LineConfig>) {
    let j = cur.len();
    if j + 1 == y.len() {
        out.push(cur.clone());
        return;
    }
    for v in y[j] + 1..=y[j + 1] {
        cur.push(v);
        rows_below(y, cur, out);
        cur.pop();
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IntertwiningReport {
    /// Total variation between the top-row path law and the `P_n` path law.
    pub marginal_tv: f64,
    /// Largest total variation between the conditional pattern law given a
    /// top-row path and the uniform law on patterns with that top row.
    pub conditional_tv: f64,
    pub paths: usize,
}

impl IntertwiningReport {
    pub fn max_tv(&self) -> f64 {
        self.marginal_tv.max(self.conditional_tv)
    }
}

/// Exact check that the top row of the pattern chain, started uniformly among
/// patterns with top row `x`, is the `P_n` chain and that the pattern given the
/// top-row path stays uniform. Checked at every time up to `horizon`.
pub fn verify_prop_rsk(x: &[i64], horizon: usize) -> IntertwiningReport {
    let n = x.len();
    let start = patterns_with_top(x);
    let w0 = 1.0 / start.len() as f64;
    // (top-row path, pattern) -> probability
    let mut dist: BTreeMap<(Vec<LineConfig>, GtPattern), f64> =
        start.into_iter().map(|p| ((vec![x.to_vec()], p), w0)).collect();
    let mut report = IntertwiningReport {
        marginal_tv: 0.0,
        conditional_tv: 0.0,
        paths: 0,
    };
    let mut uniform_cache: HashMap<LineConfig, usize> = HashMap::new();
    for t in 0..=horizon {
        if t > 0 {
            let mut next = BTreeMap::new();
            for ((path, p), w) in &dist {
                for m in 1..=n {
                    let q = gt_update(p, m);
                    let mut np = path.clone();
                    np.push(q.top().clone());
                    *next.entry((np, q)).or_insert(0.0) += w / n as f64;
                }
            }
            dist = next;
        }
        let mut by_path: BTreeMap<&Vec<LineConfig>, Vec<f64>> = BTreeMap::new();
        for ((path, _), w) in &dist {
            by_path.entry(path).or_default().push(*w);
        }
        let mut marginal = 0.0;
        for (path, ws) in &by_path {
            let mass: f64 = ws.iter().sum();
            let chain: f64 = path
                .windows(2)
                .map(|w| {
                    pn_row(&w[0])
                        .into_iter()
                        .find(|(y, _)| *y == w[1])
                        .map_or(0.0, |(_, p)| p)
                })
                .product();
            marginal += (mass - chain).abs();
            let top = path.last().expect("nonempty path");
            let count = *uniform_cache
                .entry(top.clone())
                .or_insert_with(|| patterns_with_top(top).len());
            let u = 1.0 / count as f64;
            let seen: f64 = ws.iter().map(|w| (w / mass - u).abs()).sum();
            let unseen = (count - ws.len()) as f64 * u;
            report.conditional_tv = report.conditional_tv.max(0.5 * (seen + unseen));
        }
        report.marginal_tv = report.marginal_tv.max(0.5 * marginal);
        report.paths = by_path.len();
    }
    report
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;
    use proptest::prelude::*;

    #[test]
    fn line_phi_pushes_the_blocked_particle() {
        // x_1 = y_2, so advancing x_1 forces y_2 up.
        assert_eq!(line_phi(&[0], &[-1, 0], &[1]).unwrap(), vec![-1, 1]);
        assert!(line_phi(&[0], &[-1, 0], &[2]).is_err());
        assert!(line_phi(&[0], &[0, 1], &[1]).is_err());
    }

    #[test]
    fn line_phi_brute_force_single_level() {
        for y1 in -3..5i64 {
            for y2 in 5..=8i64 {
                let y = [y1, y2];
                let out = line_phi(&[5], &y, &[6]).unwrap();
                assert!(line_interlaced(&[6], &out));
                let moved: Vec<usize> = (0..2).filter(|&i| out[i] != y[i]).collect();
                assert_eq!(moved.len(), 1);
                assert_eq!(out[moved[0]], y[moved[0]] + 1);
                // Only y_2 sits right of y_1 = y_j.
                assert_eq!(moved[0], 1);
            }
        }
    }

    #[test]
    fn null_pattern_first_step() {
        let p = GtPattern::null(3);
        let q = gt_update(&p, 1);
        assert_eq!(q.rows()[0], vec![1]);
        assert_eq!(q.rows()[1], vec![-1, 1]);
        assert_eq!(q.rows()[2], vec![-2, -1, 1]);
    }

    #[test]
    fn single_row_moves_by_one() {
        let p = GtPattern::new(vec![vec![4]]).unwrap();
        assert_eq!(gt_update(&p, 1).rows()[0], vec![5]);
    }

    #[test]
    fn pn_rows_sum_to_one() {
        assert_eq!(pn_row(&[3]), vec![(vec![4], 1.0)]);
        let r = pn_row(&[0, 1]);
        assert_eq!(r, vec![(vec![0, 2], 1.0)]);
        let mut g = rng::master(11);
        for _ in 0..100 {
            let mut x: Vec<i64> = (0..3).map(|_| g.random_range(-20..20)).collect();
            x.sort_unstable();
            x.dedup();
            if x.len() < 3 {
                continue;
            }
            let s: f64 = pn_row(&x).iter().map(|p| p.1).sum();
            assert!((s - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn window_kernel_rows() {
        let k = pn_kernel(2, 0, 6);
        for (i, s) in k.matrix.row_sums().iter().enumerate() {
            if !k.leaking.contains(&i) {
                assert!((s - 1.0).abs() < 1e-12, "row {i}");
            }
        }
        assert!(!k.leaking.is_empty());
    }

    #[test]
    fn pattern_counts() {
        // Top row (0, 2): x^1 ∈ {1, 2}.
        assert_eq!(patterns_with_top(&[0, 2]).len(), 2);
        // Strict GT patterns with top (0,2,4) correspond to semistandard
        // tableaux of shape (2,1,0): 8 of them.
        assert_eq!(patterns_with_top(&[0, 2, 4]).len(), 8);
        assert!(patterns_with_top(&[0, 2, 4]).iter().all(GtPattern::is_valid));
    }

    #[test]
    fn intertwining_exact_small() {
        assert_eq!(verify_prop_rsk(&[0], 3).max_tv(), 0.0);
        assert!(verify_prop_rsk(&[0, 1], 3).max_tv() <= 1e-12);
        assert!(verify_prop_rsk(&[0, 2, 4], 2).max_tv() <= 1e-12);
    }

    #[test]
    fn null_start_gives_partitions() {
        let mut g = rng::master(5);
        let mut p = GtPattern::null(4);
        for _ in 0..200 {
            p = gt_step(&p, &mut g);
            let x = p.top();
            let n = x.len();
            let lam: Vec<i64> = (0..n).map(|i| x[n - 1 - i] + i as i64).collect();
            assert!(lam.windows(2).all(|w| w[0] >= w[1]));
            assert!(lam[n - 1] >= 0);
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]
        #[test]
        fn updates_preserve_patterns(seed in any::<u64>(), n in 1usize..6, steps in 1usize..160) {
            let mut g = rng::master(seed);
            let mut p = GtPattern::null(n);
            for _ in 0..steps {
                p = gt_step(&p, &mut g);
                prop_assert!(p.is_valid());
            }
        }
    }
}
