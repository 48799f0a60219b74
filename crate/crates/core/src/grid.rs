//! Uniform grids, trapezoid quadrature and the two grid carriers.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Trapezoid weights for `n` nodes with step `h`.
pub fn trapezoid_weights(n: usize, h: f64) -> Vec<f64> {
    let mut w = vec![h; n];
    if n > 0 {
        w[0] = 0.5 * h;
        w[n - 1] = 0.5 * h;
    }
    if n == 1 {
        w[0] = h;
    }
    w
}

/// Trapezoid integral of samples with step `h`.
pub fn trapezoid(values: &[f64], h: f64) -> f64 {
    let n = values.len();
    match n {
        0 => 0.0,
        1 => values[0] * h,
        _ => {
            let inner: f64 = values[1..n - 1].iter().sum();
            h * (inner + 0.5 * (values[0] + values[n - 1]))
        }
    }
}

/// Catmull-Rom cubic interpolation of samples on a uniform grid.
/// Returns `None` outside `[x_min, x_min + (n-1)h]`.
pub fn cubic_interp(x_min: f64, h: f64, values: &[f64], x: f64) -> Option<f64> {
    catmull_rom(x_min, h, values, x).map(|(v, _)| v)
}

/// Derivative of the interpolant of [`cubic_interp`].
pub fn cubic_interp_slope(x_min: f64, h: f64, values: &[f64], x: f64) -> Option<f64> {
    catmull_rom(x_min, h, values, x).map(|(_, s)| s)
}

fn catmull_rom(x_min: f64, h: f64, values: &[f64], x: f64) -> Option<(f64, f64)> {
    let n = values.len();
    if n == 0 {
        return None;
    }
    let u = (x - x_min) / h;
    let last = (n - 1) as f64;
    if !(u >= -1e-9 && u <= last + 1e-9) {
        return None;
    }
    if n == 1 {
        return Some((values[0], 0.0));
    }
    let u = u.clamp(0.0, last);
    let i = (u.floor() as usize).min(n - 2);
    let t = u - i as f64;
    let p1 = values[i];
    let p2 = values[i + 1];
    let p0 = if i > 0 { values[i - 1] } else { 2.0 * p1 - p2 };
    let p3 = if i + 2 < n { values[i + 2] } else { 2.0 * p2 - p1 };
    let (c1, c2, c3) = (-p0 + p2, 2.0 * p0 - 5.0 * p1 + 4.0 * p2 - p3, -p0 + 3.0 * p1 - 3.0 * p2 + p3);
    let v = 0.5 * (2.0 * p1 + c1 * t + c2 * t * t + c3 * t * t * t);
    let s = 0.5 * (c1 + 2.0 * c2 * t + 3.0 * c3 * t * t) / h;
    Some((v, s))
}

/// Real-valued function sampled on a uniform grid.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct GridFunction {
    pub x_min: f64,
    pub h: f64,
    pub values: Vec<f64>,
}

impl GridFunction {
    pub fn new(x_min: f64, h: f64, values: Vec<f64>) -> Self {
        GridFunction { x_min, h, values }
    }

    /// Samples `f` on the grid of `d`.
    pub fn sample_on(d: &GridDensity, f: impl Fn(f64) -> f64) -> Self {
        let values = (0..d.len()).map(|i| f(d.x(i))).collect();
        GridFunction::new(d.x_min(), d.h(), values)
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn x(&self, i: usize) -> f64 {
        self.x_min + self.h * i as f64
    }

    pub fn x_max(&self) -> f64 {
        self.x(self.len().saturating_sub(1))
    }

    /// True when both grids share step and nodes to relative precision.
    pub fn congruent_with(&self, d: &GridDensity) -> bool {
        self.len() == d.len()
            && (self.h - d.h()).abs() <= 1e-12 * d.h()
            && (self.x_min - d.x_min()).abs() <= 1e-9 * d.h()
    }

    pub fn eval(&self, x: f64) -> Option<f64> {
        cubic_interp(self.x_min, self.h, &self.values, x)
    }

    pub fn slope(&self, x: f64) -> Option<f64> {
        cubic_interp_slope(self.x_min, self.h, &self.values, x)
    }

    /// Central-difference derivative, one-sided at the ends.
    pub fn derivative(&self) -> GridFunction {
        GridFunction::new(self.x_min, self.h, central_diff(&self.values, self.h))
    }
}

/// Endpoint-corrected samples at a left jump on node `k` with one-sided
/// limit `p0`: the node takes `5p0/12 + h p'/12`, its neighbour gains `p0/12`.
/// `v[k+1]` and `v[k+2]` must hold plain samples.
pub(crate) fn encode_left_jump(v: &mut [f64], k: usize, p0: f64, h: f64) {
    let (p1, p2) = (v[k + 1], v[k + 2]);
    let dp = (-3.0 * p0 + 4.0 * p1 - p2) / (2.0 * h);
    v[k] = 5.0 * p0 / 12.0 + h * dp / 12.0;
    v[k + 1] = p1 + p0 / 12.0;
}

/// Mirror image of [`encode_left_jump`].
pub(crate) fn encode_right_jump(v: &mut [f64], k: usize, p0: f64, h: f64) {
    let (p1, p2) = (v[k - 1], v[k - 2]);
    let dp = (3.0 * p0 - 4.0 * p1 + p2) / (2.0 * h);
    v[k] = 5.0 * p0 / 12.0 - h * dp / 12.0;
    v[k - 1] = p1 + p0 / 12.0;
}

pub(crate) fn central_diff(v: &[f64], h: f64) -> Vec<f64> {
    let n = v.len();
    let mut out = vec![0.0; n];
    if n < 2 {
        return out;
    }
    for i in 1..n - 1 {
        out[i] = (v[i + 1] - v[i - 1]) / (2.0 * h);
    }
    out[0] = (v[1] - v[0]) / h;
    out[n - 1] = (v[n - 1] - v[n - 2]) / h;
    out
}

/// Inverse of [`encode_left_jump`]: the one-sided limit at node `k`.
fn decode_left_jump(v: &[f64], k: usize) -> f64 {
    3.6 * (v[k] - v[k + 1] / 6.0 + v[k + 2] / 24.0)
}

fn decode_right_jump(v: &[f64], k: usize) -> f64 {
    3.6 * (v[k] - v[k - 1] / 6.0 + v[k - 2] / 24.0)
}

/// Whether the samples inward from edge node `k` read as an encoded jump:
/// decoding must give a sequence whose second difference is small against
/// its first differences. A continuous edge decodes with a kink.
fn jump_shape(v: &[f64], k: usize, dir: isize) -> bool {
    let at = |j: isize| {
        let i = k as isize + dir * j;
        if i < 0 || i as usize >= v.len() { None } else { Some(v[i as usize]) }
    };
    let (Some(a), Some(b), Some(c), Some(d)) = (at(0), at(1), at(2), at(3)) else {
        return false;
    };
    let p0 = 3.6 * (a - b / 6.0 + c / 24.0);
    let p1 = b - p0 / 12.0;
    if !(p0 > 0.0) {
        return false;
    }
    let second = (p0 - 2.0 * p1 + c).abs();
    let first = (p1 - p0).abs().max((d - c).abs());
    second <= 0.2 * first + 1e-9 * p0
}

/// Samples with the one-sided limits restored at encoded jumps.
///
/// `lo..=hi` is the closed support in node indices. A continuous edge
/// keeps its zero node inside the support, a jump edge starts at the jump.
#[derive(Debug, Clone, PartialEq)]
pub struct PlainSamples {
    pub values: Vec<f64>,
    pub lo: usize,
    pub hi: usize,
    pub left_jump: bool,
    pub right_jump: bool,
}

impl PlainSamples {
    /// Trapezoid weights over the support, zero elsewhere.
    pub fn weights(&self, h: f64) -> Vec<f64> {
        let mut w = vec![0.0; self.values.len()];
        if self.hi > self.lo {
            for wi in &mut w[self.lo..=self.hi] {
                *wi = h;
            }
            w[self.lo] = 0.5 * h;
            w[self.hi] = 0.5 * h;
        }
        w
    }
}

/// Probability density on a uniform grid with cached mean and variance.
///
/// Values integrate to one under the trapezoid rule. At a support edge
/// with a jump the edge node and its inner neighbour carry endpoint-corrected
/// samples, so the rule stays second-order accurate for smooth test
/// functions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridDensity {
    x_min: f64,
    h: f64,
    values: Vec<f64>,
    mean: f64,
    variance: f64,
}

/// Header written alongside CSV exports.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridHeader {
    pub x_min: f64,
    pub h: f64,
    pub n: usize,
    pub mean: f64,
    pub variance: f64,
}

impl GridDensity {
    /// Builds a density from raw samples, renormalizing by the trapezoid
    /// integral. Tiny negative samples (round-off) are clamped to zero.
    pub fn from_values(x_min: f64, h: f64, mut values: Vec<f64>) -> Result<Self> {
        if !(h > 0.0) || !h.is_finite() || !x_min.is_finite() {
            return Err(Error::InvalidGrid(format!("x_min={x_min}, h={h}")));
        }
        if values.len() < 3 {
            return Err(Error::InvalidGrid("fewer than 3 nodes".into()));
        }
        let peak = values.iter().cloned().fold(0.0_f64, f64::max);
        for v in values.iter_mut() {
            if !v.is_finite() {
                return Err(Error::InvalidGrid("non-finite sample".into()));
            }
            if *v < 0.0 {
                if *v < -1e-8 * peak.max(f64::MIN_POSITIVE) {
                    return Err(Error::InvalidGrid(format!("negative sample {v:.3e}")));
                }
                *v = 0.0;
            }
        }
        let z = trapezoid(&values, h);
        if !(z > 0.0) {
            return Err(Error::DegenerateDensity);
        }
        for v in values.iter_mut() {
            *v /= z;
        }
        let (mean, variance) = raw_mean_var(x_min, h, &values);
        if !(variance > 0.0) {
            return Err(Error::DegenerateVariance(variance));
        }
        Ok(GridDensity { x_min, h, values, mean, variance })
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn x_min(&self) -> f64 {
        self.x_min
    }

    pub fn x_max(&self) -> f64 {
        self.x(self.len() - 1)
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    pub fn x(&self, i: usize) -> f64 {
        self.x_min + self.h * i as f64
    }

    pub fn xs(&self) -> Vec<f64> {
        (0..self.len()).map(|i| self.x(i)).collect()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn mean(&self) -> f64 {
        self.mean
    }

    pub fn variance(&self) -> f64 {
        self.variance
    }

    pub fn sd(&self) -> f64 {
        self.variance.sqrt()
    }

    pub fn max_value(&self) -> f64 {
        self.values.iter().cloned().fold(0.0, f64::max)
    }

    pub fn weights(&self) -> Vec<f64> {
        trapezoid_weights(self.len(), self.h)
    }

    /// Probability masses `w_i p_i` of the trapezoid rule.
    pub fn masses(&self) -> Vec<f64> {
        self.weights().iter().zip(&self.values).map(|(w, p)| w * p).collect()
    }

    /// `(p(x_0) + p(x_{N-1})) h`.
    pub fn boundary_mass(&self) -> f64 {
        (self.values[0] + self.values[self.len() - 1]) * self.h
    }

    /// Trapezoid expectation of nodal values `g_i`.
    pub fn expect_values(&self, g: &[f64]) -> f64 {
        debug_assert_eq!(g.len(), self.len());
        let n = self.len();
        let mut s = 0.0;
        for i in 0..n {
            let w = if i == 0 || i == n - 1 { 0.5 } else { 1.0 };
            s += w * self.values[i] * g[i];
        }
        s * self.h
    }

    pub fn expect(&self, f: impl Fn(f64) -> f64) -> f64 {
        let g: Vec<f64> = (0..self.len()).map(|i| f(self.x(i))).collect();
        self.expect_values(&g)
    }

    pub fn as_function(&self) -> GridFunction {
        GridFunction::new(self.x_min, self.h, self.values.clone())
    }

    /// Linear interpolation of the density, zero outside the grid.
    pub fn pdf_linear(&self, x: f64) -> f64 {
        let u = (x - self.x_min) / self.h;
        if u < 0.0 || u > (self.len() - 1) as f64 {
            return 0.0;
        }
        let i = (u.floor() as usize).min(self.len() - 2);
        let t = u - i as f64;
        self.values[i] * (1.0 - t) + self.values[i + 1] * t
    }

    /// Checks the carrier invariants: unit mass, captured support and
    /// cached moments.
    pub fn check_invariants(&self) -> Result<()> {
        let z = trapezoid(&self.values, self.h);
        if (z - 1.0).abs() > 1e-8 {
            return Err(Error::InvalidGrid(format!("mass {z}")));
        }
        let b = self.boundary_mass();
        if b >= 1e-10 {
            return Err(Error::DomainTooNarrow { mass: b, lo: self.x_min, hi: self.x_max() });
        }
        let (m, v) = raw_mean_var(self.x_min, self.h, &self.values);
        if (m - self.mean).abs() > 1e-10 || (v - self.variance).abs() > 1e-10 {
            return Err(Error::InvalidGrid("cached moments stale".into()));
        }
        Ok(())
    }

    pub fn header(&self) -> GridHeader {
        GridHeader {
            x_min: self.x_min,
            h: self.h,
            n: self.len(),
            mean: self.mean,
            variance: self.variance,
        }
    }

    /// Indices of the first and last nodes of the support, including the
    /// zero node in front of a continuous edge.
    pub fn support_nodes(&self) -> (usize, usize) {
        let p = &self.values;
        let n = p.len();
        let peak = self.max_value();
        let first = p.iter().position(|v| *v > 0.0).unwrap_or(0);
        let last = p.iter().rposition(|v| *v > 0.0).unwrap_or(n - 1);
        let small = |v: f64| v < 1e-3 * peak;
        let lo = if first > 0 && (small(p[first]) || !jump_shape(p, first, 1)) { first - 1 } else { first };
        let hi = if last + 1 < n && (small(p[last]) || !jump_shape(p, last, -1)) { last + 1 } else { last };
        (lo, hi)
    }

    /// One-sided limits restored at jump edges; see [`PlainSamples`].
    pub fn plain_samples(&self) -> PlainSamples {
        let n = self.len();
        let (lo, hi) = self.support_nodes();
        let mut v = self.values.clone();
        let left_jump = lo > 0 && v[lo] > 0.0 && hi >= lo + 3;
        let right_jump = hi + 1 < n && v[hi] > 0.0 && hi >= lo + 3;
        if left_jump {
            let p0 = decode_left_jump(&self.values, lo);
            v[lo] = p0.max(0.0);
            v[lo + 1] = (self.values[lo + 1] - p0 / 12.0).max(0.0);
        }
        if right_jump {
            let p0 = decode_right_jump(&self.values, hi);
            v[hi] = p0.max(0.0);
            v[hi - 1] = (self.values[hi - 1] - p0 / 12.0).max(0.0);
        }
        PlainSamples { values: v, lo, hi, left_jump, right_jump }
    }

    /// Copy with values taken at every `step`-th node starting at `offset`,
    /// renormalized.
    pub fn subsample(&self, step: usize, offset: usize) -> Result<GridDensity> {
        let vals: Vec<f64> = self.values[offset..].iter().step_by(step).cloned().collect();
        GridDensity::from_values(self.x(offset), self.h * step as f64, vals)
    }
}

fn raw_mean_var(x_min: f64, h: f64, values: &[f64]) -> (f64, f64) {
    let n = values.len();
    let w = |i: usize| if i == 0 || i == n - 1 { 0.5 * h } else { h };
    let mut m = 0.0;
    for (i, p) in values.iter().enumerate() {
        m += w(i) * p * (x_min + h * i as f64);
    }
    let mut v = 0.0;
    for (i, p) in values.iter().enumerate() {
        let d = x_min + h * i as f64 - m;
        v += w(i) * p * d * d;
    }
    (m, v)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn trapezoid_of_linear_is_exact() {
        let v: Vec<f64> = (0..11).map(|i| 2.0 * i as f64 * 0.1 + 1.0).collect();
        assert!((trapezoid(&v, 0.1) - 2.0).abs() < 1e-14);
    }

    #[test]
    fn cubic_interp_reproduces_cubics() {
        let h = 0.25;
        let f = |x: f64| x * x * x - 2.0 * x + 1.0;
        let v: Vec<f64> = (0..20).map(|i| f(-2.0 + h * i as f64)).collect();
        let x = 0.3;
        // Catmull-Rom is exact only for quadratics; cubic error is O(h^3).
        assert!((cubic_interp(-2.0, h, &v, x).unwrap() - f(x)).abs() < 2e-2);
        assert!(cubic_interp(-2.0, h, &v, 10.0).is_none());
    }

    #[test]
    fn from_values_normalizes() {
        let v: Vec<f64> = (0..101).map(|i| {
            let x = -5.0 + 0.1 * i as f64;
            (-0.5 * x * x).exp()
        }).collect();
        let d = GridDensity::from_values(-5.0, 0.1, v).unwrap();
        assert!((trapezoid(d.values(), d.h()) - 1.0).abs() < 1e-14);
        assert!(d.mean().abs() < 1e-12);
    }

    #[test]
    fn rejects_negative_and_empty() {
        assert!(GridDensity::from_values(0.0, 0.1, vec![0.0, -1.0, 1.0, 0.0]).is_err());
        assert!(GridDensity::from_values(0.0, 0.1, vec![0.0; 4]).is_err());
        assert!(GridDensity::from_values(0.0, -0.1, vec![1.0; 4]).is_err());
    }
}
