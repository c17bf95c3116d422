//! Finite-size scaling collapse of families `A(h, L) = h^a f(h / L^b)`.
//!
//! Each set is rescaled to `x = h L^-b`, `y = A h^-a`. The known-function
//! measure compares every point with a given master curve; the
//! interpolation measure compares the points of each set with a monotone
//! cubic interpolant through every other set inside their common x-range.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::inference::FisherEstimate;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CollapsePoint {
    pub h: f64,
    pub a: f64,
    pub sigma: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CollapseSet {
    /// System size `L`.
    pub size: f64,
    /// Sorted by `h`.
    pub points: Vec<CollapsePoint>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CollapseDataset {
    sets: Vec<CollapseSet>,
}

#[derive(Debug, Serialize, Deserialize)]
struct Row {
    #[serde(rename = "L")]
    size: f64,
    h: f64,
    #[serde(rename = "A")]
    a: f64,
    #[serde(default)]
    sigma: Option<f64>,
}

impl CollapseDataset {
    /// Sorts each set by `h` and checks the dataset invariants.
    pub fn new(mut sets: Vec<CollapseSet>) -> Result<Self> {
        if sets.len() < 2 {
            return Err(Error::Dataset(format!("need at least 2 sets, found {}", sets.len())));
        }
        for s in &mut sets {
            if !(s.size.is_finite() && s.size > 0.0) {
                return Err(Error::Dataset(format!("system size {} must be positive", s.size)));
            }
            if s.points.is_empty() {
                return Err(Error::Dataset(format!("set L = {} is empty", s.size)));
            }
            if s.points.iter().any(|p| !(p.h.is_finite() && p.h > 0.0 && p.a.is_finite())) {
                return Err(Error::Dataset(format!("set L = {} has non-positive h or non-finite A", s.size)));
            }
            s.points.sort_by(|p, q| p.h.total_cmp(&q.h));
            if s.points.windows(2).any(|w| w[0].h == w[1].h) {
                return Err(Error::Dataset(format!("set L = {} repeats an h value", s.size)));
            }
        }
        for (i, s) in sets.iter().enumerate() {
            if sets[..i].iter().any(|t| t.size == s.size) {
                return Err(Error::Dataset(format!("system size {} appears twice", s.size)));
            }
        }
        Ok(Self { sets })
    }

    pub fn sets(&self) -> &[CollapseSet] {
        &self.sets
    }

    pub fn n_points(&self) -> usize {
        self.sets.iter().map(|s| s.points.len()).sum()
    }

    /// Reads `L,h,A[,sigma]` rows; sets are grouped by `L`.
    pub fn read_csv<R: std::io::Read>(r: R) -> Result<Self> {
        let mut sets: Vec<CollapseSet> = Vec::new();
        for row in csv::Reader::from_reader(r).deserialize::<Row>() {
            let row = row?;
            let point = CollapsePoint { h: row.h, a: row.a, sigma: row.sigma };
            match sets.iter_mut().find(|s| s.size == row.size) {
                Some(s) => s.points.push(point),
                None => sets.push(CollapseSet { size: row.size, points: vec![point] }),
            }
        }
        Self::new(sets)
    }

    pub fn write_csv<W: std::io::Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        for s in &self.sets {
            for p in &s.points {
                out.serialize(Row { size: s.size, h: p.h, a: p.a, sigma: p.sigma })?;
            }
        }
        out.flush()?;
        Ok(())
    }

    /// Builds a dataset from Fisher tables, one per system size, with
    /// `h = time_scale * t` and the standard errors as `sigma`.
    pub fn from_fisher(tables: &[(f64, &FisherEstimate)], time_scale: f64) -> Result<Self> {
        let sets = tables
            .iter()
            .map(|(size, est)| CollapseSet {
                size: *size,
                points: est
                    .t_checkpoints
                    .iter()
                    .zip(&est.fi_values)
                    .zip(&est.std_errors)
                    .map(|((t, f), se)| CollapsePoint { h: time_scale * t, a: *f, sigma: Some(*se) })
                    .collect(),
            })
            .collect();
        Self::new(sets)
    }

    /// Rescaled `(x, y)` per set.
    pub fn rescaled(&self, a: f64, b: f64) -> Vec<Vec<(f64, f64)>> {
        self.sets
            .iter()
            .map(|s| {
                let lb = s.size.powf(-b);
                s.points.iter().map(|p| (p.h * lb, p.a * p.h.powf(-a))).collect()
            })
            .collect()
    }
}

/// Root-mean-square relative deviation from a known master curve `f`.
pub fn collapse_measure_known<F: Fn(f64) -> f64>(data: &CollapseDataset, a: f64, b: f64, f: F) -> Result<f64> {
    let mut sum = 0.0;
    for set in data.rescaled(a, b) {
        for (x, y) in set {
            let fx = f(x);
            if fx == 0.0 || !fx.is_finite() {
                return Err(Error::DivisionByZero("scaling function vanishes at a data point"));
            }
            let r = (y - fx) / fx;
            sum += r * r;
        }
    }
    Ok((sum / data.n_points() as f64).sqrt())
}

/// Monotonicity-preserving piecewise cubic (Fritsch-Carlson), linear for
/// fewer than four nodes.
#[derive(Debug, Clone)]
pub struct MonotoneCubic {
    xs: Vec<f64>,
    ys: Vec<f64>,
    slopes: Vec<f64>,
}

impl MonotoneCubic {
    /// `xs` must be strictly increasing.
    pub fn new(xs: Vec<f64>, ys: Vec<f64>) -> Result<Self> {
        if xs.len() != ys.len() || xs.is_empty() {
            return Err(Error::Dataset("interpolant needs matching, non-empty nodes".into()));
        }
        if xs.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::Dataset("interpolation nodes must be strictly increasing".into()));
        }
        let n = xs.len();
        let secants: Vec<f64> = (0..n.saturating_sub(1)).map(|k| (ys[k + 1] - ys[k]) / (xs[k + 1] - xs[k])).collect();
        let slopes = if n < 4 {
            Vec::new()
        } else {
            let mut m = vec![0.0; n];
            m[0] = secants[0];
            m[n - 1] = secants[n - 2];
            for k in 1..n - 1 {
                m[k] = if secants[k - 1] * secants[k] <= 0.0 { 0.0 } else { 0.5 * (secants[k - 1] + secants[k]) };
            }
            for k in 0..n - 1 {
                if secants[k] == 0.0 {
                    m[k] = 0.0;
                    m[k + 1] = 0.0;
                    continue;
                }
                let alpha = m[k] / secants[k];
                let beta = m[k + 1] / secants[k];
                let s = alpha * alpha + beta * beta;
                if s > 9.0 {
                    let tau = 3.0 / s.sqrt();
                    m[k] = tau * alpha * secants[k];
                    m[k + 1] = tau * beta * secants[k];
                }
            }
            m
        };
        Ok(Self { xs, ys, slopes })
    }

    pub fn range(&self) -> (f64, f64) {
        (self.xs[0], *self.xs.last().unwrap())
    }

    /// Value at `x`, clamped to the node range.
    pub fn eval(&self, x: f64) -> f64 {
        let n = self.xs.len();
        if n == 1 {
            return self.ys[0];
        }
        let x = x.clamp(self.xs[0], self.xs[n - 1]);
        let k = match self.xs.partition_point(|&v| v <= x) {
            0 => 0,
            i => (i - 1).min(n - 2),
        };
        let h = self.xs[k + 1] - self.xs[k];
        let t = (x - self.xs[k]) / h;
        if self.slopes.is_empty() {
            return self.ys[k] + t * (self.ys[k + 1] - self.ys[k]);
        }
        let (t2, t3) = (t * t, t * t * t);
        (2.0 * t3 - 3.0 * t2 + 1.0) * self.ys[k]
            + (t3 - 2.0 * t2 + t) * h * self.slopes[k]
            + (-2.0 * t3 + 3.0 * t2) * self.ys[k + 1]
            + (t3 - t2) * h * self.slopes[k + 1]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CollapseResult {
    pub a: f64,
    pub b: f64,
    pub measure: f64,
    /// `pair[p][i]`: summed squared relative residuals of set `i` against the
    /// interpolant of basis set `p`.
    pub pair: Vec<Vec<f64>>,
    pub n_overlap: usize,
}

/// Relative slack on overlap boundaries so that points sitting exactly on
/// an edge survive the rounding of the rescaling.
const EDGE_SLACK: f64 = 1e-12;

/// Interpolation-based collapse measure.
pub fn collapse_measure(data: &CollapseDataset, a: f64, b: f64) -> Result<CollapseResult> {
    measure_impl(data, a, b, false)
}

/// Variant weighting each residual by the inverse relative variance of its
/// point. Every point must carry `sigma > 0`. This is an extension; the
/// unweighted measure is the reference.
pub fn collapse_measure_weighted(data: &CollapseDataset, a: f64, b: f64) -> Result<CollapseResult> {
    measure_impl(data, a, b, true)
}

fn measure_impl(data: &CollapseDataset, a: f64, b: f64, weighted: bool) -> Result<CollapseResult> {
    if weighted && data.sets.iter().flat_map(|s| &s.points).any(|p| !matches!(p.sigma, Some(s) if s > 0.0)) {
        return Err(Error::Dataset("weighted measure needs a positive sigma on every point".into()));
    }
    let sets = data.rescaled(a, b);
    let interps = sets
        .iter()
        .map(|s| MonotoneCubic::new(s.iter().map(|p| p.0).collect(), s.iter().map(|p| p.1).collect()))
        .collect::<Result<Vec<_>>>()?;
    let k = sets.len();
    let mut pair = vec![vec![0.0; k]; k];
    let mut n_overlap = 0usize;
    let mut weight_sum = 0.0;
    for (p, e) in interps.iter().enumerate() {
        let (lo, hi) = e.range();
        let slack = EDGE_SLACK * (hi - lo).abs().max(hi.abs());
        for (i, set) in sets.iter().enumerate() {
            if i == p {
                continue;
            }
            for (j, &(x, y)) in set.iter().enumerate() {
                if x < lo - slack || x > hi + slack {
                    continue;
                }
                let ex = e.eval(x);
                if ex == 0.0 || !ex.is_finite() {
                    return Err(Error::DivisionByZero("interpolant vanishes inside the overlap"));
                }
                let r = (y - ex) / ex;
                let w = if weighted {
                    let pt = &data.sets[i].points[j];
                    let rel = pt.sigma.unwrap() / pt.a.abs();
                    1.0 / (rel * rel)
                } else {
                    1.0
                };
                pair[p][i] += w * r * r;
                weight_sum += w;
                n_overlap += 1;
            }
        }
    }
    if n_overlap == 0 {
        return Err(Error::NoOverlap);
    }
    let total: f64 = pair.iter().flatten().sum();
    let norm = if weighted { weight_sum } else { n_overlap as f64 };
    Ok(CollapseResult { a, b, measure: (total / norm).sqrt(), pair, n_overlap })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Exponent {
    A,
    B,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CollapseWarning {
    /// The optimum lies within one grid step of the scanned range edge.
    Boundary(Exponent),
    /// The measure does not change along this exponent at the optimum.
    Unidentifiable(Exponent),
}

#[derive(Debug, Clone)]
pub struct CollapseOptimum {
    pub result: CollapseResult,
    pub a_grid: Vec<f64>,
    pub b_grid: Vec<f64>,
    /// `landscape[ia][ib]`; `NaN` where the measure is undefined.
    pub landscape: Vec<Vec<f64>>,
    pub warnings: Vec<CollapseWarning>,
}

pub const GRID_POINTS: usize = 41;
pub const EXPONENT_TOLERANCE: f64 = 1e-4;

fn grid(range: (f64, f64)) -> Vec<f64> {
    (0..GRID_POINTS).map(|i| range.0 + (range.1 - range.0) * i as f64 / (GRID_POINTS - 1) as f64).collect()
}

/// Grid scan over the given exponent ranges followed by Nelder-Mead
/// refinement from the best cell.
pub fn optimize_collapse(data: &CollapseDataset, a_range: (f64, f64), b_range: (f64, f64)) -> Result<CollapseOptimum> {
    if !(a_range.0 < a_range.1 && b_range.0 < b_range.1) {
        return Err(Error::Config("exponent ranges must have lo < hi".into()));
    }
    let a_grid = grid(a_range);
    let b_grid = grid(b_range);
    let landscape: Vec<Vec<f64>> = a_grid
        .par_iter()
        .map(|&a| b_grid.iter().map(|&b| collapse_measure(data, a, b).map_or(f64::NAN, |r| r.measure)).collect())
        .collect();

    // Ties within rounding go to the first cell in scan order.
    let min = landscape.iter().flatten().copied().filter(|m| m.is_finite()).fold(f64::INFINITY, f64::min);
    if !min.is_finite() {
        return Err(Error::NoOverlap);
    }
    let cutoff = min + 1e-12 * (1.0 + min);
    let (ia, ib) = (0..GRID_POINTS)
        .flat_map(|ia| (0..GRID_POINTS).map(move |ib| (ia, ib)))
        .find(|&(ia, ib)| landscape[ia][ib] <= cutoff)
        .unwrap();

    let objective = |v: [f64; 2]| -> f64 {
        if v[0] < a_range.0 || v[0] > a_range.1 || v[1] < b_range.0 || v[1] > b_range.1 {
            return f64::INFINITY;
        }
        collapse_measure(data, v[0], v[1]).map_or(f64::INFINITY, |r| r.measure)
    };
    let step = [(a_range.1 - a_range.0) / (GRID_POINTS - 1) as f64, (b_range.1 - b_range.0) / (GRID_POINTS - 1) as f64];
    let start = [a_grid[ia], b_grid[ib]];
    let refined = nelder_mead(objective, start, step, EXPONENT_TOLERANCE, 2000);
    let (a, b) = if objective(refined) <= landscape[ia][ib] { (refined[0], refined[1]) } else { (start[0], start[1]) };
    let result = collapse_measure(data, a, b)?;

    let mut warnings = Vec::new();
    let near_edge = |v: f64, range: (f64, f64), st: f64| v - range.0 < st || range.1 - v < st;
    for (exp, v, g, range, st) in
        [(Exponent::A, a, start[0], a_range, step[0]), (Exponent::B, b, start[1], b_range, step[1])]
    {
        if near_edge(v, range, st) || near_edge(g, range, st) {
            warnings.push(CollapseWarning::Boundary(exp));
        }
    }
    let flat = |vals: &[f64]| {
        let finite: Vec<f64> = vals.iter().copied().filter(|m| m.is_finite()).collect();
        let (lo, hi) = finite.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(l, h), &m| (l.min(m), h.max(m)));
        finite.len() == vals.len() && hi - lo <= 1e-9 * (1.0 + hi.abs())
    };
    if flat(&landscape[ia]) {
        warnings.push(CollapseWarning::Unidentifiable(Exponent::B));
    }
    if flat(&landscape.iter().map(|row| row[ib]).collect::<Vec<_>>()) {
        warnings.push(CollapseWarning::Unidentifiable(Exponent::A));
    }
    Ok(CollapseOptimum { result, a_grid, b_grid, landscape, warnings })
}

/// Two-dimensional Nelder-Mead; stops when every vertex is within `tol` of
/// the best one in both coordinates.
fn nelder_mead<F: Fn([f64; 2]) -> f64>(f: F, start: [f64; 2], step: [f64; 2], tol: f64, max_iter: usize) -> [f64; 2] {
    let mut simplex = [start, [start[0] + step[0], start[1]], [start[0], start[1] + step[1]]];
    let mut values = simplex.map(&f);
    let lerp = |p: [f64; 2], q: [f64; 2], t: f64| [p[0] + t * (q[0] - p[0]), p[1] + t * (q[1] - p[1])];
    for _ in 0..max_iter {
        let mut order = [0, 1, 2];
        order.sort_by(|&i, &j| values[i].total_cmp(&values[j]));
        simplex = order.map(|i| simplex[i]);
        values = order.map(|i| values[i]);
        let spread = simplex[1..]
            .iter()
            .map(|v| (v[0] - simplex[0][0]).abs().max((v[1] - simplex[0][1]).abs()))
            .fold(0.0, f64::max);
        if spread < tol {
            break;
        }
        let centroid = lerp(simplex[0], simplex[1], 0.5);
        let reflected = lerp(centroid, simplex[2], -1.0);
        let fr = f(reflected);
        if fr < values[0] {
            let expanded = lerp(centroid, simplex[2], -2.0);
            let fe = f(expanded);
            (simplex[2], values[2]) = if fe < fr { (expanded, fe) } else { (reflected, fr) };
        } else if fr < values[1] {
            (simplex[2], values[2]) = (reflected, fr);
        } else {
            let contracted =
                if fr < values[2] { lerp(centroid, reflected, 0.5) } else { lerp(centroid, simplex[2], 0.5) };
            let fc = f(contracted);
            if fc < values[2].min(fr) {
                (simplex[2], values[2]) = (contracted, fc);
            } else {
                for k in 1..3 {
                    simplex[k] = lerp(simplex[0], simplex[k], 0.5);
                    values[k] = f(simplex[k]);
                }
            }
        }
    }
    let best = (0..3).min_by(|&i, &j| values[i].total_cmp(&values[j])).unwrap();
    simplex[best]
}

/// `Q = M(ideal) / M(noisy)` at fixed exponents. A noisy measure of zero
/// gives `+inf`, unless the ideal one is zero too, in which case the two
/// families collapse equally well and `Q = 1`.
pub fn quality_factor(noisy: &CollapseDataset, ideal: &CollapseDataset, a: f64, b: f64) -> Result<f64> {
    let m_noisy = collapse_measure(noisy, a, b)?.measure;
    let m_ideal = collapse_measure(ideal, a, b)?.measure;
    if m_noisy == 0.0 {
        return Ok(if m_ideal == 0.0 { 1.0 } else { f64::INFINITY });
    }
    Ok(m_ideal / m_noisy)
}

/// Exponents used for the Fisher-information collapse.
pub const FISHER_EXPONENTS: (f64, f64) = (2.0, 1.0);

#[cfg(test)]
mod tests {
    use super::*;

    fn family(sizes: &[f64], a: f64, b: f64, f: impl Fn(f64) -> f64, hs: &[f64]) -> CollapseDataset {
        let sets = sizes
            .iter()
            .map(|&l| CollapseSet {
                size: l,
                points: hs.iter().map(|&h| CollapsePoint { h, a: h.powf(a) * f(h / l.powf(b)), sigma: None }).collect(),
            })
            .collect();
        CollapseDataset::new(sets).unwrap()
    }

    fn log_spaced(lo: f64, hi: f64, n: usize) -> Vec<f64> {
        (0..n).map(|i| lo * (hi / lo).powf(i as f64 / (n - 1) as f64)).collect()
    }

    #[test]
    fn known_measure_vanishes_on_exact_family() {
        let f = |x: f64| 1.0 + x + 0.3 * x * x;
        let data = family(&[5.0, 10.0, 20.0], 2.0, 1.0, f, &log_spaced(0.5, 20.0, 12));
        assert!(collapse_measure_known(&data, 2.0, 1.0, f).unwrap() < 1e-14);
        assert!(collapse_measure_known(&data, 3.0, 1.0, f).unwrap() > 0.1);
    }

    #[test]
    fn known_measure_single_perturbed_point() {
        let f = |x: f64| 2.0 + x;
        let data = family(&[2.0, 4.0], 1.0, 1.0, f, &[1.0, 2.0, 3.0, 4.0]);
        let mut sets = data.sets().to_vec();
        sets[1].points[2].a *= 1.1;
        let data = CollapseDataset::new(sets).unwrap();
        let m = collapse_measure_known(&data, 1.0, 1.0, f).unwrap();
        assert!((m - 0.1 / 8f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn known_measure_rejects_zero_master_curve() {
        let data = family(&[2.0, 4.0], 1.0, 1.0, |x| x, &[1.0, 2.0]);
        assert!(matches!(collapse_measure_known(&data, 1.0, 1.0, |_| 0.0), Err(Error::DivisionByZero(_))));
    }

    #[test]
    fn monotone_cubic_reproduces_cubic_data_and_stays_monotone() {
        let xs = log_spaced(0.1, 10.0, 100);
        let c = |x: f64| 1.0 + 0.5 * x + 0.2 * x * x + 0.01 * x * x * x;
        let e = MonotoneCubic::new(xs.clone(), xs.iter().map(|&x| c(x)).collect()).unwrap();
        for k in 0..xs.len() - 1 {
            let x = 0.5 * (xs[k] + xs[k + 1]);
            assert!(((e.eval(x) - c(x)) / c(x)).abs() < 1e-3);
        }
        let step = MonotoneCubic::new(vec![0.0, 1.0, 2.0, 3.0, 4.0], vec![0.0, 0.0, 1.0, 1.0, 1.0]).unwrap();
        let mut prev = f64::NEG_INFINITY;
        for i in 0..=400 {
            let v = step.eval(i as f64 / 100.0);
            assert!(v >= prev - 1e-15 && (-1e-15..=1.0 + 1e-15).contains(&v));
            prev = v;
        }
        let lin = MonotoneCubic::new(vec![0.0, 2.0], vec![1.0, 5.0]).unwrap();
        assert_eq!(lin.eval(0.5), 2.0);
        assert_eq!(lin.eval(9.0), 5.0);
    }

    #[test]
    fn interpolation_measure_on_master_curve() {
        let f = |x: f64| 1.0 + 2.0 * x + 0.5 * x * x + 0.1 * x * x * x;
        let data = family(&[1.0, 2.0], 0.0, 1.0, f, &log_spaced(0.2, 10.0, 100));
        let r = collapse_measure(&data, 0.0, 1.0).unwrap();
        assert!(r.measure < 1e-3, "{}", r.measure);
        assert!(r.n_overlap > 0);
        assert_eq!(r.pair[0][0], 0.0);
        assert_eq!(r.pair[1][1], 0.0);
    }

    #[test]
    fn disjoint_sets_have_no_overlap() {
        let data = family(&[1.0, 100.0], 0.0, 1.0, |x| 1.0 + x, &[1.0, 2.0, 3.0]);
        assert!(matches!(collapse_measure(&data, 0.0, 1.0), Err(Error::NoOverlap)));
    }

    #[test]
    fn boundary_points_count_as_overlap() {
        // Rescaled ranges [1, 2] and [2, 4] touch at x = 2.
        let data = family(&[1.0, 2.0], 0.0, 1.0, |x| 1.0 + x, &[1.0, 2.0]);
        let sets = vec![
            CollapseSet { size: 1.0, points: data.sets()[0].points.clone() },
            CollapseSet {
                size: 2.0,
                points: [4.0, 8.0].iter().map(|&h| CollapsePoint { h, a: 1.0 + h / 2.0, sigma: None }).collect(),
            },
        ];
        let data = CollapseDataset::new(sets).unwrap();
        let r = collapse_measure(&data, 0.0, 1.0).unwrap();
        assert_eq!(r.n_overlap, 2);
        assert!(r.measure < 1e-14);
    }

    #[test]
    fn optimizer_recovers_planted_exponents() {
        let f = |x: f64| 1.0 / (1.0 + x);
        let data = family(&[10.0, 20.0, 40.0], 2.0, 1.0, f, &log_spaced(1.0, 80.0, 25));
        let opt = optimize_collapse(&data, (1.0, 3.0), (0.0, 2.0)).unwrap();
        assert!((opt.result.a - 2.0).abs() < 0.05 && (opt.result.b - 1.0).abs() < 0.05, "{:?}", opt.result);
        assert!(opt.warnings.is_empty(), "{:?}", opt.warnings);
        assert_eq!(opt.landscape.len(), GRID_POINTS);
    }

    #[test]
    fn flat_family_leaves_b_undetermined() {
        let data = family(&[10.0, 20.0, 40.0], 0.0, 1.0, |_| 3.0, &log_spaced(1.0, 40.0, 10));
        let opt = optimize_collapse(&data, (-1.0, 3.0), (0.5, 1.5)).unwrap();
        assert!(opt.result.a.abs() < 0.05, "{:?}", opt.result);
        assert!(opt.warnings.contains(&CollapseWarning::Unidentifiable(Exponent::B)));
        assert!(opt.warnings.contains(&CollapseWarning::Boundary(Exponent::B)));
    }

    #[test]
    fn quality_factor_cases() {
        let hs = log_spaced(1.0, 40.0, 20);
        let ideal = family(&[10.0, 20.0], 2.0, 1.0, |x| 1.0 / (1.0 + x), &hs);
        assert_eq!(quality_factor(&ideal, &ideal, 2.0, 1.0).unwrap(), 1.0);

        let slightly = family(&[10.0, 20.0], 2.0, 1.0, |x| 1.0 / (1.0 + x) + 0.01 * (7.0 * x).sin(), &hs);
        let mut sets = slightly.sets().to_vec();
        for (k, p) in sets[1].points.iter_mut().enumerate() {
            p.a *= 1.0 + 0.05 * if k % 2 == 0 { 1.0 } else { -1.0 };
        }
        let noisy = CollapseDataset::new(sets).unwrap();
        assert!(quality_factor(&noisy, &slightly, 2.0, 1.0).unwrap() < 1.0);

        let q = quality_factor(&ideal, &noisy, 1.0, 1.0).unwrap();
        assert!(q > 0.0);
    }

    #[test]
    fn weighted_measure_requires_sigma() {
        let data = family(&[1.0, 2.0], 0.0, 1.0, |x| 1.0 + x, &[1.0, 2.0, 3.0, 4.0]);
        assert!(collapse_measure_weighted(&data, 0.0, 1.0).is_err());
        let mut sets = data.sets().to_vec();
        for p in sets.iter_mut().flat_map(|s| s.points.iter_mut()) {
            p.sigma = Some(0.1 * p.a);
        }
        let data = CollapseDataset::new(sets).unwrap();
        let plain = collapse_measure(&data, 0.0, 1.0).unwrap().measure;
        let weighted = collapse_measure_weighted(&data, 0.0, 1.0).unwrap().measure;
        assert!((plain - weighted).abs() < 1e-12);
    }

    #[test]
    fn dataset_validation() {
        let pt = |h| CollapsePoint { h, a: 1.0, sigma: None };
        let one = vec![CollapseSet { size: 1.0, points: vec![pt(1.0)] }];
        assert!(CollapseDataset::new(one.clone()).is_err());
        let dup_size = vec![one[0].clone(), one[0].clone()];
        assert!(CollapseDataset::new(dup_size).is_err());
        let dup_h = vec![one[0].clone(), CollapseSet { size: 2.0, points: vec![pt(1.0), pt(1.0)] }];
        assert!(CollapseDataset::new(dup_h).is_err());
        let unsorted = vec![one[0].clone(), CollapseSet { size: 2.0, points: vec![pt(3.0), pt(1.0)] }];
        let d = CollapseDataset::new(unsorted).unwrap();
        assert_eq!(d.sets()[1].points[0].h, 1.0);
    }

    #[test]
    fn csv_round_trip() {
        let data = family(&[5.0, 10.0], 2.0, 1.0, |x| 1.0 + x, &[0.5, 1.0, 2.0]);
        let mut buf = Vec::new();
        data.write_csv(&mut buf).unwrap();
        assert!(String::from_utf8(buf.clone()).unwrap().starts_with("L,h,A,sigma"));
        assert_eq!(CollapseDataset::read_csv(buf.as_slice()).unwrap(), data);
        let no_sigma = "L,h,A\n1,1,2\n1,2,3\n2,1,2\n";
        let d = CollapseDataset::read_csv(no_sigma.as_bytes()).unwrap();
        assert_eq!(d.sets().len(), 2);
        assert_eq!(d.sets()[0].points[1].sigma, None);
    }
}
