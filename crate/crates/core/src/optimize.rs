//! Deterministic derivative-free max-min search.
//!
//! A uniform grid pass seeds a handful of local refinements. Each refinement
//! runs golden-section line searches along the coordinate axes, the pairwise
//! diagonals and the last net displacement, repeating until a full sweep moves
//! the point by less than the tolerance. The diagonal and displacement
//! directions let the search follow the ridge where two witnesses cross,
//! which pure axis-aligned searches cannot.

use std::cmp::Ordering;
use std::fmt;

use rayon::prelude::*;

use crate::error::{Error, Result};

const INV_PHI: f64 = 0.618_033_988_749_894_9;

/// Search interval of one free variable.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Domain {
    pub lo: f64,
    pub hi: f64,
    /// `hi` is identified with `lo` (angles).
    pub periodic: bool,
}

impl Domain {
    pub fn angle() -> Self {
        Self {
            lo: -std::f64::consts::PI,
            hi: std::f64::consts::PI,
            periodic: true,
        }
    }

    pub fn interval(lo: f64, hi: f64) -> Self {
        Self { lo, hi, periodic: false }
    }

    fn width(&self) -> f64 {
        self.hi - self.lo
    }

    fn grid(&self, n: usize) -> Vec<f64> {
        if self.periodic {
            (0..n).map(|k| self.lo + self.width() * k as f64 / n as f64).collect()
        } else if n == 1 {
            vec![0.5 * (self.lo + self.hi)]
        } else {
            (0..n).map(|k| self.lo + self.width() * k as f64 / (n - 1) as f64).collect()
        }
    }

    fn spacing(&self, n: usize) -> f64 {
        if self.periodic {
            self.width() / n as f64
        } else {
            self.width() / (n.max(2) - 1) as f64
        }
    }

    /// Maps `x` into the domain: wrapped for periodic domains, clamped
    /// otherwise.
    pub fn wrap(&self, x: f64) -> f64 {
        if self.periodic {
            let w = self.width();
            let mut y = self.lo + (x - self.lo).rem_euclid(w);
            if y >= self.hi {
                y -= w;
            }
            y
        } else {
            x.clamp(self.lo, self.hi)
        }
    }

    fn distance(&self, a: f64, b: f64) -> f64 {
        let d = (a - b).abs();
        if self.periodic {
            d.min(self.width() - d)
        } else {
            d
        }
    }
}

/// Which analysis produced an [`OptimizationResult`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum ObjectiveKind {
    StandardMax,
    Passive,
    Active,
    FixedAngle,
}

impl fmt::Display for ObjectiveKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::StandardMax => "standard-max",
            Self::Passive => "passive",
            Self::Active => "active",
            Self::FixedAngle => "fixed-angle",
        })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct OptimizationResult {
    pub best_angles: Vec<f64>,
    pub best_value: f64,
    pub objective: ObjectiveKind,
    pub evaluations: usize,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SearchOptions {
    /// Grid points per free dimension.
    pub grid_points: usize,
    /// Cap on the total number of grid points; the per-dimension count is
    /// reduced to `floor(budget^(1/d))` when `grid_points^d` would exceed it.
    pub grid_budget: usize,
    /// Maximum number of grid points refined; only points that are local
    /// maxima along every axis are candidates.
    pub starts: usize,
    /// Refinement stops once a sweep moves the point by less than this.
    pub tolerance: f64,
    pub max_sweeps: usize,
}

impl Default for SearchOptions {
    fn default() -> Self {
        Self {
            grid_points: 64,
            grid_budget: 1 << 18,
            starts: 8,
            tolerance: 1e-10,
            max_sweeps: 400,
        }
    }
}

impl SearchOptions {
    pub fn points_per_dim(&self, dims: usize) -> usize {
        let mut n = self.grid_points.max(1);
        while n > 2 && (n as f64).powi(dims as i32) > self.grid_budget as f64 {
            n -= 1;
        }
        n
    }
}

fn min_value(values: &[f64]) -> f64 {
    let m = values.iter().copied().fold(f64::INFINITY, f64::min);
    if m.is_nan() || values.iter().any(|v| v.is_nan()) {
        f64::NEG_INFINITY
    } else {
        m
    }
}

fn lex_cmp(a: &[f64], b: &[f64]) -> Ordering {
    for (x, y) in a.iter().zip(b) {
        match x.total_cmp(y) {
            Ordering::Equal => continue,
            other => return other,
        }
    }
    Ordering::Equal
}

/// Ranks (value, point) pairs: larger value first, then lexicographically
/// smaller point.
fn better(a: (f64, &[f64]), b: (f64, &[f64])) -> bool {
    match a.0.total_cmp(&b.0) {
        Ordering::Greater => true,
        Ordering::Less => false,
        Ordering::Equal => lex_cmp(a.1, b.1) == Ordering::Less,
    }
}

/// Golden-section search for a maximum of `f` on `[lo, hi]`.
/// Returns `(x, f(x), evaluations)`.
pub fn golden_section_max(f: impl Fn(f64) -> f64, lo: f64, hi: f64, tol: f64) -> (f64, f64, usize) {
    let (mut a, mut b) = (lo, hi);
    let mut x1 = b - INV_PHI * (b - a);
    let mut x2 = a + INV_PHI * (b - a);
    let mut f1 = f(x1);
    let mut f2 = f(x2);
    let mut evals = 2;
    while (b - a) > tol {
        if f1 >= f2 {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - INV_PHI * (b - a);
            f1 = f(x1);
        } else {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + INV_PHI * (b - a);
            f2 = f(x2);
        }
        evals += 1;
    }
    if f1 >= f2 {
        (x1, f1, evals)
    } else {
        (x2, f2, evals)
    }
}

/// Locates the point in `[lo, hi]` where `indicator` changes value, to a
/// bracket of width `width`. Returns the bracket `(left, right)`.
pub fn bisect_indicator(indicator: impl Fn(f64) -> bool, lo: f64, hi: f64, width: f64) -> Result<(f64, f64)> {
    let (mut a, mut b) = (lo, hi);
    let left = indicator(a);
    if left == indicator(b) {
        return Err(Error::NonBracketing(format!(
            "indicator is {left} at both ends of [{lo}, {hi}]"
        )));
    }
    while b - a > width {
        let mid = 0.5 * (a + b);
        if indicator(mid) == left {
            a = mid;
        } else {
            b = mid;
        }
    }
    Ok((a, b))
}

struct Refiner<'a, F> {
    objective: &'a F,
    domains: &'a [Domain],
    scale: Vec<f64>,
    options: SearchOptions,
}

impl<F> Refiner<'_, F>
where
    F: Fn(&[f64]) -> Vec<f64> + Sync,
{
    fn eval(&self, x: &[f64]) -> f64 {
        min_value(&(self.objective)(x))
    }

    fn step(&self, x: &[f64], dir: &[f64], t: f64) -> Vec<f64> {
        x.iter()
            .zip(dir)
            .zip(self.domains)
            .map(|((xi, di), dom)| dom.wrap(xi + t * di))
            .collect()
    }

    fn line_search(&self, x: &mut Vec<f64>, fx: &mut f64, dir: &[f64], radius: f64, evals: &mut usize) {
        let tol = (self.options.tolerance * 1e-2).max(radius * 1e-13);
        let (t, ft, n) = golden_section_max(|t| self.eval(&self.step(x, dir, t)), -radius, radius, tol);
        *evals += n;
        if ft > *fx {
            *x = self.step(x, dir, t);
            *fx = ft;
        }
    }

    fn distance(&self, a: &[f64], b: &[f64]) -> f64 {
        a.iter()
            .zip(b)
            .zip(self.domains)
            .map(|((x, y), d)| d.distance(*x, *y))
            .fold(0.0, f64::max)
    }

    /// Steepest ascent direction of the pointwise minimum: the shortest vector
    /// in the convex hull of the gradients of all nearly active components.
    /// On a crossing ridge this points along the ridge.
    fn ascent_direction(&self, x: &[f64], slack: f64, evals: &mut usize) -> Option<Vec<f64>> {
        const H: f64 = 1e-6;
        let values = (self.objective)(x);
        let lowest = min_value(&values);
        if !lowest.is_finite() {
            return None;
        }
        let active: Vec<usize> = (0..values.len()).filter(|&k| values[k] - lowest <= slack).collect();
        let d = x.len();
        let mut grads = vec![vec![0.0; d]; active.len()];
        for i in 0..d {
            let mut e = vec![0.0; d];
            e[i] = self.scale[i];
            let up = (self.objective)(&self.step(x, &e, H));
            let down = (self.objective)(&self.step(x, &e, -H));
            for (g, &k) in grads.iter_mut().zip(&active) {
                g[i] = (up[k] - down[k]) / (2.0 * H);
            }
        }
        *evals += 1 + 2 * d;
        let w = min_norm_combination(&grads);
        let norm = w.iter().map(|v| v * v).sum::<f64>().sqrt();
        if !(norm > 0.0 && norm.is_finite()) {
            return None;
        }
        Some(w.iter().zip(&self.scale).map(|(v, h)| v / norm * h).collect())
    }

    fn refine(&self, mut x: Vec<f64>, mut fx: f64) -> (Vec<f64>, f64, usize) {
        let d = x.len();
        let mut evals = 0;
        let mut dirs: Vec<Vec<f64>> = Vec::new();
        for i in 0..d {
            let mut e = vec![0.0; d];
            e[i] = self.scale[i];
            dirs.push(e);
        }
        for i in 0..d {
            for j in i + 1..d {
                for sign in [1.0, -1.0] {
                    let mut e = vec![0.0; d];
                    e[i] = self.scale[i];
                    e[j] = sign * self.scale[j];
                    dirs.push(e);
                }
            }
        }
        // Recent net displacements, newest first. Kept across sweeps so a
        // ridge direction, once found, is searched along on every sweep.
        let mut ridge: Vec<Vec<f64>> = Vec::new();
        let mut radius = 1.0;
        for _ in 0..self.options.max_sweeps {
            let start = x.clone();
            for dir in dirs.iter().chain(&ridge) {
                self.line_search(&mut x, &mut fx, dir, radius, &mut evals);
            }
            if let Some(dir) = self.ascent_direction(&x, 1e-3 * radius, &mut evals) {
                self.line_search(&mut x, &mut fx, &dir, radius, &mut evals);
            }
            // Net displacement of this sweep, unwrapped on periodic axes.
            let shift: Vec<f64> = x
                .iter()
                .zip(&start)
                .zip(self.domains)
                .map(|((a, b), dom)| {
                    let mut s = a - b;
                    if dom.periodic {
                        let w = dom.width();
                        s -= w * (s / w).round();
                    }
                    s
                })
                .collect();
            let norm = shift
                .iter()
                .zip(&self.scale)
                .map(|(s, h)| (s / h).powi(2))
                .sum::<f64>()
                .sqrt();
            if norm > 0.0 {
                let dir: Vec<f64> = shift.iter().map(|s| s / norm).collect();
                self.line_search(&mut x, &mut fx, &dir, 2.0 * radius.max(norm), &mut evals);
                ridge.insert(0, dir);
                ridge.truncate(d);
            }
            let moved = self.distance(&x, &start);
            if moved < self.options.tolerance {
                break;
            }
            // Shrink the search radius towards the scale of recent moves.
            let max_scale = self.scale.iter().copied().fold(0.0, f64::max);
            radius = (4.0 * moved / max_scale).clamp(1e-6, 1.0);
        }
        (x, fx, evals)
    }
}

/// Shortest point of the convex hull of `vectors`, by Frank-Wolfe iterations
/// with exact line search.
fn min_norm_combination(vectors: &[Vec<f64>]) -> Vec<f64> {
    let dot = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>();
    let mut z = vectors[0].clone();
    for _ in 0..500 {
        // Vertex minimizing <z, v>.
        let v = vectors
            .iter()
            .min_by(|a, b| dot(&z, a).total_cmp(&dot(&z, b)))
            .expect("non-empty");
        let diff: Vec<f64> = v.iter().zip(&z).map(|(a, b)| a - b).collect();
        let dd = dot(&diff, &diff);
        let gap = -dot(&z, &diff);
        if dd == 0.0 || gap <= 1e-15 * dot(&z, &z).max(1e-300) {
            break;
        }
        let t = (gap / dd).min(1.0);
        for (zi, di) in z.iter_mut().zip(&diff) {
            *zi += t * di;
        }
    }
    z
}

/// Maximizes `min_k objective(x)[k]` over the box `domains`.
///
/// The grid pass is evaluated in parallel; results are identical regardless of
/// scheduling. Ties are broken towards the lexicographically smallest point.
pub fn maximize_min<F>(objective: F, domains: &[Domain], kind: ObjectiveKind, options: SearchOptions) -> OptimizationResult
where
    F: Fn(&[f64]) -> Vec<f64> + Sync,
{
    let dims = domains.len();
    assert!(dims > 0, "at least one free variable");
    let n = options.points_per_dim(dims);
    let axes: Vec<Vec<f64>> = domains.iter().map(|d| d.grid(n)).collect();
    let total = n.pow(dims as u32);

    let point = |mut k: usize| -> Vec<f64> {
        let mut p = vec![0.0; dims];
        for dim in (0..dims).rev() {
            p[dim] = axes[dim][k % n];
            k /= n;
        }
        p
    };
    let values: Vec<f64> = (0..total)
        .into_par_iter()
        .map(|k| min_value(&objective(&point(k))))
        .collect();

    // Only grid points at least as good as their axis neighbours start a
    // refinement, so each basin is refined once. Grid index order is
    // lexicographic order of points, so a stable sort on value alone keeps
    // the lexicographic tie-break.
    let is_peak = |k: usize| {
        let mut stride = 1;
        for dim in (0..dims).rev() {
            let digit = (k / stride) % n;
            let periodic = domains[dim].periodic;
            let below = if digit > 0 {
                Some(k - stride)
            } else if periodic && n > 1 {
                Some(k + (n - 1) * stride)
            } else {
                None
            };
            let above = if digit + 1 < n {
                Some(k + stride)
            } else if periodic && n > 1 {
                Some(k - (n - 1) * stride)
            } else {
                None
            };
            if [below, above].into_iter().flatten().any(|j| values[j] > values[k]) {
                return false;
            }
            stride *= n;
        }
        true
    };
    let mut order: Vec<usize> = (0..total).filter(|&k| is_peak(k)).collect();
    order.sort_by(|&a, &b| values[b].total_cmp(&values[a]));
    order.truncate(options.starts.max(1));

    let refiner = Refiner {
        objective: &objective,
        domains,
        scale: domains.iter().map(|d| d.spacing(n)).collect(),
        options,
    };
    let refined: Vec<(Vec<f64>, f64, usize)> = order
        .par_iter()
        .map(|&k| refiner.refine(point(k), values[k]))
        .collect();

    let mut evaluations = total;
    let mut best: Option<(Vec<f64>, f64)> = None;
    for (x, fx, e) in refined {
        evaluations += e;
        let replace = match &best {
            None => true,
            Some((bx, bf)) => better((fx, &x), (*bf, bx)),
        };
        if replace {
            best = Some((x, fx));
        }
    }
    let (best_angles, best_value) = best.expect("at least one start");
    OptimizationResult {
        best_angles,
        best_value,
        objective: kind,
        evaluations,
    }
}

/// Local refinement only, starting from `start`; the refinement step sizes
/// are those of a grid of `options.points_per_dim` points. Used to follow an
/// optimum as a parameter of the objective varies.
pub fn maximize_min_from<F>(
    objective: F,
    domains: &[Domain],
    kind: ObjectiveKind,
    start: &[f64],
    options: SearchOptions,
) -> OptimizationResult
where
    F: Fn(&[f64]) -> Vec<f64> + Sync,
{
    assert_eq!(start.len(), domains.len(), "start point dimension");
    let n = options.points_per_dim(domains.len());
    let refiner = Refiner {
        objective: &objective,
        domains,
        scale: domains.iter().map(|d| d.spacing(n)).collect(),
        options,
    };
    let x: Vec<f64> = start.iter().zip(domains).map(|(x, d)| d.wrap(*x)).collect();
    let fx = refiner.eval(&x);
    let (best_angles, best_value, evaluations) = refiner.refine(x, fx);
    OptimizationResult {
        best_angles,
        best_value,
        objective: kind,
        evaluations: evaluations + 1,
    }
}
