//! Analytic families and their materialization onto a uniform grid.

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Gamma, Normal};
use statrs::function::gamma::ln_gamma;

use crate::error::{Error, Result};
use crate::grid::{encode_left_jump, encode_right_jump, GridDensity};

/// Tail mass allowed outside the grid domain.
pub const TAIL_MASS_LIMIT: f64 = 1e-12;
/// Default number of grid points.
pub const DEFAULT_POINTS: usize = 4096;
/// Zero nodes kept beyond a finite support edge.
pub const EDGE_MARGIN: usize = 16;

const SIDE_TAIL: f64 = 2.5e-13;

fn one() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum Family {
    Normal {
        #[serde(default)]
        mean: f64,
        #[serde(default = "one")]
        var: f64,
    },
    Exponential {
        #[serde(default = "one")]
        rate: f64,
    },
    Gamma {
        shape: f64,
        #[serde(default = "one")]
        scale: f64,
    },
    Uniform {
        a: f64,
        b: f64,
    },
    Laplace {
        #[serde(default)]
        loc: f64,
        #[serde(default = "one")]
        scale: f64,
    },
    GaussianMixture {
        weights: Vec<f64>,
        means: Vec<f64>,
        vars: Vec<f64>,
    },
    Table {
        x: Vec<f64>,
        p: Vec<f64>,
    },
}

/// A family plus the standardization flag.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DistributionSpec {
    #[serde(flatten)]
    pub family: Family,
    /// Shift and scale analytically to mean 0, variance 1.
    #[serde(default)]
    pub center_and_scale: bool,
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Edge {
    /// Density tends to zero (or is continuous) at the edge.
    Smooth,
    /// Finite nonzero one-sided limit.
    Jump(f64),
    /// Density unbounded at the edge.
    Singular,
}

/// Requested grid: number of points and an optional explicit domain.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub points: usize,
    #[serde(default)]
    pub domain: Option<(f64, f64)>,
}

impl Default for GridSpec {
    fn default() -> Self {
        GridSpec { points: DEFAULT_POINTS, domain: None }
    }
}

impl GridSpec {
    pub fn with_points(points: usize) -> Self {
        GridSpec { points, domain: None }
    }

    pub fn with_domain(lo: f64, hi: f64, points: usize) -> Self {
        GridSpec { points, domain: Some((lo, hi)) }
    }
}

impl Family {
    pub fn normal(mean: f64, var: f64) -> Self {
        Family::Normal { mean, var }
    }

    pub fn exponential(rate: f64) -> Self {
        Family::Exponential { rate }
    }

    pub fn gamma(shape: f64) -> Self {
        Family::Gamma { shape, scale: 1.0 }
    }

    pub fn uniform(a: f64, b: f64) -> Self {
        Family::Uniform { a, b }
    }

    pub fn laplace(loc: f64, scale: f64) -> Self {
        Family::Laplace { loc, scale }
    }

    /// The two-component mixture ½N(−1,0.5)+½N(1,0.5).
    pub fn two_bump() -> Self {
        Family::GaussianMixture {
            weights: vec![0.5, 0.5],
            means: vec![-1.0, 1.0],
            vars: vec![0.5, 0.5],
        }
    }

    pub fn spec(self) -> DistributionSpec {
        DistributionSpec { family: self, center_and_scale: false }
    }

    pub fn standardized(self) -> DistributionSpec {
        DistributionSpec { family: self, center_and_scale: true }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Family::Normal { .. } => "normal",
            Family::Exponential { .. } => "exponential",
            Family::Gamma { .. } => "gamma",
            Family::Uniform { .. } => "uniform",
            Family::Laplace { .. } => "laplace",
            Family::GaussianMixture { .. } => "gaussian_mixture",
            Family::Table { .. } => "table",
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidParams(m));
        let pos = |v: f64| v.is_finite() && v > 0.0;
        match self {
            Family::Normal { mean, var } => {
                if !mean.is_finite() || !pos(*var) {
                    return bad(format!("normal requires finite mean and var > 0, got {mean}, {var}"));
                }
            }
            Family::Exponential { rate } => {
                if !pos(*rate) {
                    return bad(format!("exponential rate must be > 0, got {rate}"));
                }
            }
            Family::Gamma { shape, scale } => {
                if !pos(*shape) || !pos(*scale) {
                    return bad(format!("gamma shape and scale must be > 0, got {shape}, {scale}"));
                }
            }
            Family::Uniform { a, b } => {
                if !a.is_finite() || !b.is_finite() || !(a < b) {
                    return bad(format!("uniform requires a < b, got {a}, {b}"));
                }
            }
            Family::Laplace { loc, scale } => {
                if !loc.is_finite() || !pos(*scale) {
                    return bad(format!("laplace scale must be > 0, got {scale}"));
                }
            }
            Family::GaussianMixture { weights, means, vars } => {
                if weights.is_empty() || weights.len() != means.len() || weights.len() != vars.len() {
                    return bad("mixture weights, means, vars must be non-empty and equal length".into());
                }
                if weights.iter().any(|w| !w.is_finite() || *w < 0.0) {
                    return bad("mixture weights must be >= 0".into());
                }
                let s: f64 = weights.iter().sum();
                if (s - 1.0).abs() > 1e-9 {
                    return bad(format!("mixture weights sum to {s}, expected 1"));
                }
                if means.iter().any(|m| !m.is_finite()) || vars.iter().any(|v| !pos(*v)) {
                    return bad("mixture means finite and vars > 0 required".into());
                }
            }
            Family::Table { x, p } => {
                if x.len() < 2 || x.len() != p.len() {
                    return bad("table needs at least two (x, p) pairs of equal length".into());
                }
                if x.windows(2).any(|w| !(w[1] > w[0])) || x.iter().any(|v| !v.is_finite()) {
                    return bad("table x must be strictly increasing and finite".into());
                }
                if p.iter().any(|v| !v.is_finite() || *v < 0.0) || p.iter().all(|v| *v == 0.0) {
                    return bad("table p must be >= 0 and not all zero".into());
                }
            }
        }
        Ok(())
    }

    fn table_mass(x: &[f64], p: &[f64]) -> f64 {
        x.windows(2).zip(p.windows(2)).map(|(xw, pw)| 0.5 * (xw[1] - xw[0]) * (pw[0] + pw[1])).sum()
    }

    /// Raw moment `E X^r` of a table density, r ≤ 2, exact for the linear interpolant.
    fn table_moment(x: &[f64], p: &[f64], r: i32) -> f64 {
        let z = Self::table_mass(x, p);
        let mut s = 0.0;
        for i in 0..x.len() - 1 {
            // integrate x^r (p0 + (p1-p0)(x-x0)/dx) over the segment
            let (x0, x1, p0, p1) = (x[i], x[i + 1], p[i], p[i + 1]);
            let slope = (p1 - p0) / (x1 - x0);
            let c0 = p0 - slope * x0;
            let prim = |t: f64| {
                c0 * t.powi(r + 1) / (r + 1) as f64 + slope * t.powi(r + 2) / (r + 2) as f64
            };
            s += prim(x1) - prim(x0);
        }
        s / z
    }

    pub fn mean(&self) -> f64 {
        match self {
            Family::Normal { mean, .. } => *mean,
            Family::Exponential { rate } => 1.0 / rate,
            Family::Gamma { shape, scale } => shape * scale,
            Family::Uniform { a, b } => 0.5 * (a + b),
            Family::Laplace { loc, .. } => *loc,
            Family::GaussianMixture { weights, means, .. } => {
                weights.iter().zip(means).map(|(w, m)| w * m).sum()
            }
            Family::Table { x, p } => Self::table_moment(x, p, 1),
        }
    }

    pub fn variance(&self) -> f64 {
        match self {
            Family::Normal { var, .. } => *var,
            Family::Exponential { rate } => 1.0 / (rate * rate),
            Family::Gamma { shape, scale } => shape * scale * scale,
            Family::Uniform { a, b } => (b - a).powi(2) / 12.0,
            Family::Laplace { scale, .. } => 2.0 * scale * scale,
            Family::GaussianMixture { .. } => self.central_moments().unwrap()[0],
            Family::Table { x, p } => {
                let m = Self::table_moment(x, p, 1);
                Self::table_moment(x, p, 2) - m * m
            }
        }
    }

    /// Closed-form centred moments `[m2, m3, m4]` where available.
    pub fn central_moments(&self) -> Option<[f64; 3]> {
        Some(match self {
            Family::Normal { var, .. } => [*var, 0.0, 3.0 * var * var],
            Family::Exponential { rate } => {
                let s = 1.0 / rate;
                [s * s, 2.0 * s.powi(3), 9.0 * s.powi(4)]
            }
            Family::Gamma { shape: k, scale: t } => {
                [k * t * t, 2.0 * k * t.powi(3), (3.0 * k * k + 6.0 * k) * t.powi(4)]
            }
            Family::Uniform { a, b } => {
                let w = b - a;
                [w * w / 12.0, 0.0, w.powi(4) / 80.0]
            }
            Family::Laplace { scale: b, .. } => [2.0 * b * b, 0.0, 24.0 * b.powi(4)],
            Family::GaussianMixture { weights, means, vars } => {
                let m: f64 = weights.iter().zip(means).map(|(w, m)| w * m).sum();
                let mut out = [0.0; 3];
                for ((w, mu), v) in weights.iter().zip(means).zip(vars) {
                    let d = mu - m;
                    out[0] += w * (d * d + v);
                    out[1] += w * (d.powi(3) + 3.0 * d * v);
                    out[2] += w * (d.powi(4) + 6.0 * d * d * v + 3.0 * v * v);
                }
                out
            }
            Family::Table { .. } => return None,
        })
    }

    fn support(&self) -> (f64, f64) {
        match self {
            Family::Exponential { .. } | Family::Gamma { .. } => (0.0, f64::INFINITY),
            Family::Uniform { a, b } => (*a, *b),
            Family::Table { x, .. } => (x[0], x[x.len() - 1]),
            _ => (f64::NEG_INFINITY, f64::INFINITY),
        }
    }

    fn edges(&self) -> (Edge, Edge) {
        match self {
            Family::Exponential { rate } => (Edge::Jump(*rate), Edge::Smooth),
            Family::Gamma { shape, scale } => {
                if *shape == 1.0 {
                    (Edge::Jump(1.0 / scale), Edge::Smooth)
                } else if *shape < 1.0 {
                    (Edge::Singular, Edge::Smooth)
                } else {
                    (Edge::Smooth, Edge::Smooth)
                }
            }
            Family::Uniform { a, b } => {
                let v = 1.0 / (b - a);
                (Edge::Jump(v), Edge::Jump(v))
            }
            Family::Table { p, x } => {
                let z = Self::table_mass(x, p);
                let e = |v: f64| if v > 0.0 { Edge::Jump(v / z) } else { Edge::Smooth };
                (e(p[0]), e(p[p.len() - 1]))
            }
            _ => (Edge::Smooth, Edge::Smooth),
        }
    }

    /// Density; at a finite support edge the one-sided limit from inside.
    pub fn pdf(&self, x: f64) -> f64 {
        match self {
            Family::Normal { mean, var } => gauss(x, *mean, *var),
            Family::Exponential { rate } => {
                if x < 0.0 {
                    0.0
                } else {
                    rate * (-rate * x).exp()
                }
            }
            Family::Gamma { shape, scale } => {
                if x < 0.0 {
                    0.0
                } else if x == 0.0 {
                    match shape.partial_cmp(&1.0).unwrap() {
                        std::cmp::Ordering::Greater => 0.0,
                        std::cmp::Ordering::Equal => 1.0 / scale,
                        std::cmp::Ordering::Less => f64::INFINITY,
                    }
                } else {
                    ((shape - 1.0) * x.ln() - x / scale - ln_gamma(*shape) - shape * scale.ln()).exp()
                }
            }
            Family::Uniform { a, b } => {
                if x >= *a && x <= *b {
                    1.0 / (b - a)
                } else {
                    0.0
                }
            }
            Family::Laplace { loc, scale } => (-(x - loc).abs() / scale).exp() / (2.0 * scale),
            Family::GaussianMixture { weights, means, vars } => weights
                .iter()
                .zip(means)
                .zip(vars)
                .map(|((w, m), v)| w * gauss(x, *m, *v))
                .sum(),
            Family::Table { x: xs, p } => {
                let n = xs.len();
                if x < xs[0] || x > xs[n - 1] {
                    return 0.0;
                }
                let z = Self::table_mass(xs, p);
                let i = match xs.partition_point(|v| *v <= x) {
                    0 => 0,
                    k => (k - 1).min(n - 2),
                };
                let t = (x - xs[i]) / (xs[i + 1] - xs[i]);
                (p[i] * (1.0 - t) + p[i + 1] * t) / z
            }
        }
    }

    /// `P(X ≤ x)`.
    pub fn cdf(&self, x: f64) -> f64 {
        match self {
            Family::Normal { mean, var } => Normal::new(*mean, var.sqrt()).unwrap().cdf(x),
            Family::Exponential { rate } => {
                if x <= 0.0 {
                    0.0
                } else {
                    -(-rate * x).exp_m1()
                }
            }
            Family::Gamma { shape, scale } => {
                if x <= 0.0 {
                    0.0
                } else {
                    Gamma::new(*shape, 1.0 / scale).unwrap().cdf(x)
                }
            }
            Family::Uniform { a, b } => ((x - a) / (b - a)).clamp(0.0, 1.0),
            Family::Laplace { loc, scale } => {
                if x < *loc {
                    0.5 * ((x - loc) / scale).exp()
                } else {
                    1.0 - 0.5 * (-(x - loc) / scale).exp()
                }
            }
            Family::GaussianMixture { weights, means, vars } => weights
                .iter()
                .zip(means)
                .zip(vars)
                .map(|((w, m), v)| w * Normal::new(*m, v.sqrt()).unwrap().cdf(x))
                .sum(),
            Family::Table { x: xs, p } => {
                let z = Self::table_mass(xs, p);
                let mut s = 0.0;
                for i in 0..xs.len() - 1 {
                    if x <= xs[i] {
                        break;
                    }
                    let x1 = x.min(xs[i + 1]);
                    let p1 = self.pdf(x1) * z;
                    s += 0.5 * (x1 - xs[i]) * (p[i] + p1);
                }
                (s / z).clamp(0.0, 1.0)
            }
        }
    }

    /// `P(X > x)`, accurate in the far right tail.
    pub fn sf(&self, x: f64) -> f64 {
        match self {
            Family::Normal { mean, var } => Normal::new(*mean, var.sqrt()).unwrap().sf(x),
            Family::Exponential { rate } => {
                if x <= 0.0 {
                    1.0
                } else {
                    (-rate * x).exp()
                }
            }
            Family::Gamma { shape, scale } => {
                if x <= 0.0 {
                    1.0
                } else {
                    Gamma::new(*shape, 1.0 / scale).unwrap().sf(x)
                }
            }
            Family::Laplace { loc, scale } => {
                if x < *loc {
                    1.0 - 0.5 * ((x - loc) / scale).exp()
                } else {
                    0.5 * (-(x - loc) / scale).exp()
                }
            }
            Family::GaussianMixture { weights, means, vars } => weights
                .iter()
                .zip(means)
                .zip(vars)
                .map(|((w, m), v)| w * Normal::new(*m, v.sqrt()).unwrap().sf(x))
                .sum(),
            _ => 1.0 - self.cdf(x),
        }
    }
}

fn gauss(x: f64, m: f64, v: f64) -> f64 {
    let d = x - m;
    (-0.5 * d * d / v).exp() / (2.0 * std::f64::consts::PI * v).sqrt()
}

/// `Y = (X - loc) / scale` for a family `X`.
#[derive(Debug, Clone)]
struct Law {
    fam: Family,
    loc: f64,
    scale: f64,
}

impl Law {
    fn new(spec: &DistributionSpec) -> Result<Self> {
        spec.family.validate()?;
        let (loc, scale) = if spec.center_and_scale {
            let v = spec.family.variance();
            if !(v > 0.0) {
                return Err(Error::DegenerateVariance(v));
            }
            (spec.family.mean(), v.sqrt())
        } else {
            (0.0, 1.0)
        };
        Ok(Law { fam: spec.family.clone(), loc, scale })
    }

    fn to_x(&self, y: f64) -> f64 {
        self.loc + self.scale * y
    }

    fn pdf(&self, y: f64) -> f64 {
        self.scale * self.fam.pdf(self.to_x(y))
    }

    fn cdf(&self, y: f64) -> f64 {
        self.fam.cdf(self.to_x(y))
    }

    fn sf(&self, y: f64) -> f64 {
        self.fam.sf(self.to_x(y))
    }

    fn support(&self) -> (f64, f64) {
        let (a, b) = self.fam.support();
        ((a - self.loc) / self.scale, (b - self.loc) / self.scale)
    }

    fn edges(&self) -> (Edge, Edge) {
        let (l, r) = self.fam.edges();
        let s = |e: Edge| match e {
            Edge::Jump(v) => Edge::Jump(v * self.scale),
            other => other,
        };
        (s(l), s(r))
    }

    fn mean(&self) -> f64 {
        (self.fam.mean() - self.loc) / self.scale
    }

    fn sd(&self) -> f64 {
        self.fam.variance().sqrt() / self.scale
    }

    fn tail_mass(&self, lo: f64, hi: f64) -> f64 {
        self.cdf(lo) + self.sf(hi)
    }

    /// Smallest `y` with left tail mass below `target`, by bisection.
    fn left_quantile(&self, target: f64) -> f64 {
        let (mut a, mut b) = (self.mean() - self.sd(), self.mean() - self.sd());
        while self.cdf(a) > target {
            a = self.mean() - 2.0 * (self.mean() - a);
        }
        for _ in 0..200 {
            let m = 0.5 * (a + b);
            if self.cdf(m) > target {
                b = m;
            } else {
                a = m;
            }
        }
        a
    }

    fn right_quantile(&self, target: f64) -> f64 {
        let (mut a, mut b) = (self.mean() + self.sd(), self.mean() + self.sd());
        while self.sf(b) > target {
            b = self.mean() + 2.0 * (b - self.mean());
        }
        for _ in 0..200 {
            let m = 0.5 * (a + b);
            if self.sf(m) > target {
                a = m;
            } else {
                b = m;
            }
        }
        b
    }
}

/// Default domain and step: ±12 standard deviations, widened until each
/// tail carries less than 2.5e-13, with zero margins beyond finite edges.
fn default_grid(law: &Law, points: usize) -> (f64, f64) {
    let (a, b) = law.support();
    let (m, s) = (law.mean(), law.sd());
    let (lo, lm) = if a.is_finite() {
        (a, EDGE_MARGIN)
    } else {
        ((m - 12.0 * s).min(law.left_quantile(SIDE_TAIL)), 0)
    };
    let (hi, rm) = if b.is_finite() {
        (b, EDGE_MARGIN)
    } else {
        ((m + 12.0 * s).max(law.right_quantile(SIDE_TAIL)), 0)
    };
    let h = (hi - lo) / (points - 1 - lm - rm) as f64;
    (lo - lm as f64 * h, h)
}

/// Places jump edges of an explicit domain exactly on nodes.
fn snap_grid(law: &Law, lo: f64, hi: f64, points: usize) -> (f64, f64) {
    let mut h = (hi - lo) / (points - 1) as f64;
    let mut x_min = lo;
    let (a, b) = law.support();
    let (el, er) = law.edges();
    let jumpy = |e: Edge| !matches!(e, Edge::Smooth);
    let inside = |v: f64| v.is_finite() && v > lo && v < hi;
    let left = jumpy(el) && inside(a);
    let right = jumpy(er) && inside(b);
    if left && right {
        let kl = ((a - lo) / h).round();
        let kr = ((b - lo) / h).round();
        if kr > kl {
            h = (b - a) / (kr - kl);
            x_min = a - kl * h;
        }
    } else if left {
        x_min = a - ((a - lo) / h).round() * h;
    } else if right {
        x_min = b - ((b - lo) / h).round() * h;
    }
    (x_min, h)
}

/// Samples a law onto `points` nodes starting at `x_min`, encoding edges.
fn sample(law: &Law, x_min: f64, h: f64, points: usize) -> Vec<f64> {
    let (a, b) = law.support();
    let (el, er) = law.edges();
    let x = |i: usize| x_min + h * i as f64;
    let tol = 1e-7 * h;
    let mut v: Vec<f64> = (0..points)
        .map(|i| {
            let xi = x(i);
            if xi < a - tol || xi > b + tol {
                0.0
            } else if (xi - a).abs() <= tol || (xi - b).abs() <= tol {
                // edge nodes are filled below
                0.0
            } else {
                law.pdf(xi)
            }
        })
        .collect();
    let node_of = |e: f64| -> Option<usize> {
        if !e.is_finite() {
            return None;
        }
        let k = ((e - x_min) / h).round();
        if k >= 0.0 && (k as usize) < points && (x(k as usize) - e).abs() <= tol {
            Some(k as usize)
        } else {
            None
        }
    };
    if let Some(k) = node_of(a) {
        match el {
            Edge::Smooth => v[k] = law.pdf(a).max(0.0).min(f64::MAX),
            Edge::Jump(p0) if k + 2 < points => encode_left_jump(&mut v, k, p0, h),
            Edge::Jump(p0) => v[k] = 0.5 * p0,
            Edge::Singular => {
                let mass = law.cdf(a + 0.5 * h);
                v[k] = 2.0 * mass / h;
            }
        }
    }
    if let Some(k) = node_of(b) {
        match er {
            Edge::Smooth => v[k] = law.pdf(b).max(0.0),
            Edge::Jump(p0) if k >= 2 => encode_right_jump(&mut v, k, p0, h),
            Edge::Jump(p0) => v[k] = 0.5 * p0,
            Edge::Singular => v[k] = 2.0 * law.sf(b - 0.5 * h) / h,
        }
    }
    v
}

/// Samples `spec` onto a uniform grid and renormalizes.
///
/// Support edges where the density jumps are placed on nodes; an explicit
/// domain is shifted (and, with two such edges, its step adjusted) by less
/// than one step to achieve this.
pub fn materialize(spec: &DistributionSpec, grid: &GridSpec) -> Result<GridDensity> {
    let law = Law::new(spec)?;
    if grid.points < 64 {
        return Err(Error::InvalidGrid(format!("need at least 64 points, got {}", grid.points)));
    }
    let (x_min, h) = match grid.domain {
        None => default_grid(&law, grid.points),
        Some((lo, hi)) => {
            if !(lo < hi) || !lo.is_finite() || !hi.is_finite() {
                return Err(Error::InvalidGrid(format!("domain [{lo}, {hi}]")));
            }
            snap_grid(&law, lo, hi, grid.points)
        }
    };
    let x_max = x_min + h * (grid.points - 1) as f64;
    let tail = law.tail_mass(x_min, x_max);
    if tail >= TAIL_MASS_LIMIT {
        return Err(Error::DomainTooNarrow { mass: tail, lo: x_min, hi: x_max });
    }
    let values = sample(&law, x_min, h, grid.points);
    GridDensity::from_values(x_min, h, values)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::density::moments;
    use crate::grid::trapezoid;

    #[test]
    fn normal_on_fixed_domain() {
        let d = materialize(&Family::normal(0.0, 1.0).spec(), &GridSpec::with_domain(-10.0, 10.0, 4096)).unwrap();
        assert!((trapezoid(d.values(), d.h()) - 1.0).abs() < 1e-8);
        assert!((d.variance() - 1.0).abs() < 1e-6);
        d.check_invariants().unwrap();
    }

    #[test]
    fn centered_exponential_moments() {
        let d = materialize(&Family::exponential(1.0).standardized(), &GridSpec::default()).unwrap();
        assert!(d.mean().abs() < 1e-6);
        assert!((d.variance() - 1.0).abs() < 1e-6);
        d.check_invariants().unwrap();
    }

    #[test]
    fn mixture_variance() {
        let d = materialize(&Family::two_bump().spec(), &GridSpec::default()).unwrap();
        assert!((d.variance() - 1.5).abs() < 1e-6);
    }

    #[test]
    fn narrow_domain_rejected() {
        let e = materialize(&Family::normal(0.0, 1.0).spec(), &GridSpec::with_domain(-3.0, 3.0, 1024));
        assert!(matches!(e, Err(Error::DomainTooNarrow { .. })));
    }

    #[test]
    fn invalid_params_rejected() {
        for f in [
            Family::Gamma { shape: -1.0, scale: 1.0 },
            Family::Uniform { a: 1.0, b: 0.0 },
            Family::GaussianMixture { weights: vec![0.3, 0.3], means: vec![0.0, 1.0], vars: vec![1.0, 1.0] },
            Family::Table { x: vec![0.0, 0.0], p: vec![1.0, 1.0] },
        ] {
            assert!(matches!(materialize(&f.spec(), &GridSpec::default()), Err(Error::InvalidParams(_))));
        }
    }

    #[test]
    fn uniform_edges_on_nodes() {
        let s3 = 3f64.sqrt();
        let d = materialize(&Family::uniform(-s3, s3).spec(), &GridSpec::with_domain(-2.0, 2.0, 2000)).unwrap();
        let k = ((-s3 - d.x_min()) / d.h()).round() as usize;
        assert!((d.x(k) + s3).abs() < 1e-12);
        assert!((d.variance() - 1.0).abs() < 1e-6);
        assert!((d.values()[1000] - 0.5 / s3).abs() < 1e-12);
    }

    #[test]
    fn closed_form_moments_match_quadrature() {
        let fams = [
            Family::normal(0.3, 2.0),
            Family::exponential(1.0),
            Family::gamma(5.0),
            Family::uniform(-1.0, 2.0),
            Family::laplace(0.0, 1.0),
            Family::two_bump(),
        ];
        for f in fams {
            let cm = f.central_moments().unwrap();
            let d = materialize(&f.clone().spec(), &GridSpec::default()).unwrap();
            for (r, want) in [(2, cm[0]), (3, cm[1]), (4, cm[2])] {
                let got = moments(&d, r);
                assert!((got - want).abs() < 1e-5 * want.abs().max(1.0), "{} m{r}: {got} vs {want}", f.name());
            }
        }
    }

    #[test]
    fn serde_round_trip() {
        let s: DistributionSpec = serde_json::from_str(r#"{"family":"gamma","shape":5,"center_and_scale":true}"#).unwrap();
        assert_eq!(s, Family::gamma(5.0).standardized());
        let m: DistributionSpec =
            serde_json::from_str(&serde_json::to_string(&Family::two_bump().spec()).unwrap()).unwrap();
        assert_eq!(m.family, Family::two_bump());
    }

    #[test]
    fn table_is_interpolated() {
        let t = Family::Table { x: vec![-1.0, 0.0, 1.0], p: vec![0.0, 1.0, 0.0] };
        assert!((t.pdf(0.5) - 0.5).abs() < 1e-15);
        assert!((t.cdf(0.0) - 0.5).abs() < 1e-15);
        let d = materialize(&t.spec(), &GridSpec::default()).unwrap();
        assert!((d.variance() - 1.0 / 6.0).abs() < 1e-6);
    }
}
