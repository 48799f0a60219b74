//! Moments, standardization, truncation and export of grid densities.

use crate::error::{Error, Result};
use crate::family::EDGE_MARGIN;
use crate::grid::{cubic_interp, encode_left_jump, encode_right_jump, GridDensity};
use crate::report::fmt_real;

/// Centred moment `m_r` by trapezoid quadrature. Any `r ≥ 1`; `m_2` equals
/// the cached variance.
pub fn moments(d: &GridDensity, r: u32) -> f64 {
    if r == 2 {
        return d.variance();
    }
    let m = d.mean();
    d.expect(|x| (x - m).powi(r as i32))
}

/// Skewness `m_3 / m_2^{3/2}`.
pub fn skewness(d: &GridDensity) -> f64 {
    moments(d, 3) / d.variance().powf(1.5)
}

/// Affine change of variable to mean 0, variance 1. Grid nodes move with
/// the map, so no interpolation is involved.
pub fn standardize(d: &GridDensity) -> Result<GridDensity> {
    let v = d.variance();
    if !(v > 0.0) || !v.is_finite() {
        return Err(Error::DegenerateVariance(v));
    }
    let s = v.sqrt();
    let values = d.values().iter().map(|p| p * s).collect();
    GridDensity::from_values((d.x_min() - d.mean()) / s, d.h() / s, values)
}

/// `a X` for `a > 0`, again by moving the nodes.
pub fn scale(d: &GridDensity, a: f64) -> Result<GridDensity> {
    if !(a > 0.0) {
        return Err(Error::InvalidParams(format!("scale factor must be > 0, got {a}")));
    }
    let values = d.values().iter().map(|p| p / a).collect();
    GridDensity::from_values(d.x_min() * a, d.h() * a, values)
}

/// Law of `X` conditioned on `|X| ≤ t`.
///
/// When the mass outside the window is negligible the original nodes are
/// kept. Otherwise the window is resampled onto a grid with nodes at `±t`,
/// where the density jumps are encoded as in [`crate::materialize`].
pub fn conditional_truncate(d: &GridDensity, t: f64) -> Result<GridDensity> {
    if !(t > 0.0) {
        return Err(Error::InvalidParams(format!("truncation level must be > 0, got {t}")));
    }
    let n = d.len();
    let h = d.h();
    let w = d.weights();
    let mut inside = 0.0;
    let mut outside = 0.0;
    for i in 0..n {
        let m = w[i] * d.values()[i];
        if d.x(i).abs() <= t {
            inside += m;
        } else {
            outside += m;
        }
    }
    if !(inside > 0.0) {
        return Err(Error::EmptyWindow(t));
    }
    if outside == 0.0 {
        return Ok(d.clone());
    }
    if outside < 1e-13 * inside {
        let values = (0..n).map(|i| if d.x(i).abs() <= t { d.values()[i] } else { 0.0 }).collect();
        return GridDensity::from_values(d.x_min(), h, values);
    }
    let lo = (-t).max(d.x_min());
    let hi = t.min(d.x_max());
    if !(hi > lo) {
        return Err(Error::EmptyWindow(t));
    }
    let k = ((hi - lo) / h).ceil().max(8.0) as usize;
    let hn = (hi - lo) / k as f64;
    let m = EDGE_MARGIN;
    let total = k + 1 + 2 * m;
    let x_min = lo - m as f64 * hn;
    let interp = |x: f64| cubic_interp(d.x_min(), h, d.values(), x).unwrap_or(0.0).max(0.0);
    let mut v = vec![0.0; total];
    for (j, vj) in v.iter_mut().enumerate().take(m + k).skip(m + 1) {
        *vj = interp(x_min + hn * j as f64);
    }
    let (kl, kr) = (m, m + k);
    let pl = interp(lo);
    let pr = interp(hi);
    if lo > d.x_min() {
        encode_left_jump(&mut v, kl, pl, hn);
    } else {
        v[kl] = pl;
    }
    if hi < d.x_max() {
        encode_right_jump(&mut v, kr, pr, hn);
    } else {
        v[kr] = pr;
    }
    for vj in v.iter_mut() {
        *vj = vj.max(0.0);
    }
    GridDensity::from_values(x_min, hn, v)
}

/// CSV with columns `x,p`.
pub fn to_csv(d: &GridDensity) -> String {
    let mut s = String::with_capacity(32 * d.len());
    s.push_str("x,p\n");
    for (i, p) in d.values().iter().enumerate() {
        s.push_str(&fmt_real(d.x(i)));
        s.push(',');
        s.push_str(&fmt_real(*p));
        s.push('\n');
    }
    s
}
