//! Laws of scaled sums and Gaussian smoothings, synthesized from powers of
//! the characteristic function on a padded periodic grid.

use rayon::prelude::*;
use rustfft::num_complex::Complex64;
use rustfft::FftPlanner;

use crate::density::standardize;
use crate::error::{Error, Result};
use crate::grid::GridDensity;

/// Largest mass tolerated within eight steps of a free window edge.
pub const ALIAS_MASS: f64 = 1e-9;
/// Density level, relative to the peak, below which a window is trimmed.
const TRIM_REL: f64 = 1e-13;
/// Gaussian tail allowance in standard deviations.
const GAUSS_RANGE: f64 = 8.5;
const ALIAS_STEPS: usize = 8;
const PAD: usize = 2;

/// Output window. A hard side sits on a support edge of the law, so the
/// density vanishes beyond it and no aliasing check applies there.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Window {
    pub lo: f64,
    pub hi: f64,
    pub points: usize,
    pub hard_lo: bool,
    pub hard_hi: bool,
}

/// `E exp(iωX)` at each `ω` by the trapezoid rule over the support.
pub fn characteristic(d: &GridDensity, omegas: &[f64]) -> Vec<Complex64> {
    let m = d.masses();
    let lo = m.iter().position(|v| *v != 0.0).unwrap_or(0);
    let hi = m.iter().rposition(|v| *v != 0.0).unwrap_or(0);
    let m = &m[lo..=hi];
    let x0 = d.x(lo);
    let h = d.h();
    omegas
        .par_iter()
        .map(|&w| {
            let step = Complex64::from_polar(1.0, w * h);
            let mut acc = Complex64::new(0.0, 0.0);
            for (c, chunk) in m.chunks(32).enumerate() {
                let mut z = Complex64::from_polar(1.0, w * (x0 + h * (32 * c) as f64));
                for mj in chunk {
                    acc += z * *mj;
                    z *= step;
                }
            }
            acc
        })
        .collect()
}

/// Density of `a (X_1 + … + X_n) + √var Z` on `window`, where the `X_i`
/// are copies of `base` and `Z` is standard normal.
pub fn synthesize(base: &GridDensity, a: f64, n: u32, var: f64, window: &Window) -> Result<GridDensity> {
    let m = window.points;
    if m < 16 || !(window.hi > window.lo) {
        return Err(Error::InvalidGrid(format!("window [{}, {}] with {m} points", window.lo, window.hi)));
    }
    if !(a > 0.0) || n == 0 || !(var >= 0.0) {
        return Err(Error::InvalidParams(format!("a={a}, n={n}, var={var}")));
    }
    let mp = PAD * m;
    let h = (window.hi - window.lo) / (m - 1) as f64;
    let off = (mp - m) / 2;
    let start = window.lo - off as f64 * h;
    let dw = 2.0 * std::f64::consts::PI / (mp as f64 * h);
    let half = mp / 2;
    let omegas: Vec<f64> = (0..=half).map(|k| a * dw * k as f64).collect();
    let cf = characteristic(base, &omegas);
    let mut spec = vec![Complex64::new(0.0, 0.0); mp];
    for k in 0..mp {
        let (kk, conj) = if k <= half { (k, false) } else { (mp - k, true) };
        let w = dw * kk as f64;
        let mut phi = cf[kk].powu(n) * (-0.5 * var * w * w).exp();
        if conj {
            phi = phi.conj();
        }
        let signed = if conj { -w } else { w };
        spec[k] = phi * Complex64::from_polar(1.0, -signed * start);
    }
    FftPlanner::new().plan_fft_forward(mp).process(&mut spec);
    let scale = 1.0 / (mp as f64 * h);
    let values: Vec<f64> = spec[off..off + m].iter().map(|c| (c.re * scale).max(0.0)).collect();
    let d = GridDensity::from_values(window.lo, h, values)?;
    let k = ALIAS_STEPS.min(m / 4);
    let v = d.values();
    let edge = |r: std::ops::Range<usize>| v[r].iter().sum::<f64>() * h;
    let mut alias: f64 = 0.0;
    if !window.hard_lo {
        alias = alias.max(edge(0..k + 1));
    }
    if !window.hard_hi {
        alias = alias.max(edge(m - k - 1..m));
    }
    if alias > ALIAS_MASS {
        return Err(Error::Aliasing(alias));
    }
    Ok(d)
}

/// Initial window for `a ΣX_i + √var Z` from the support and tails of `base`.
fn crude_window(base: &GridDensity, a: f64, n: u32, var: f64, points: usize) -> Window {
    let (lo, hi) = base.support_nodes();
    let v = base.values();
    let hard_lo = v[0] == 0.0 && var == 0.0;
    let hard_hi = v[v.len() - 1] == 0.0 && var == 0.0;
    let (l, r) = (base.x(lo), base.x(hi));
    let (nf, rn) = (n as f64, (n as f64).sqrt());
    let g = GAUSS_RANGE * var.sqrt();
    let side = |e: f64, hard: bool| if hard { a * nf * e } else { a * rn * e };
    Window {
        lo: side(l, hard_lo).min(a * nf * r) - g,
        hi: side(r, hard_hi).max(a * nf * l) + g,
        points,
        hard_lo,
        hard_hi,
    }
}

/// Law of `a (X_1 + … + X_n) + √var Z` on a window fitted to its mass.
///
/// A first pass on a conservative window locates where the density falls
/// below `1e-13` of its peak; the second pass resolves the trimmed window
/// with the same number of points.
pub fn combination_law(base: &GridDensity, a: f64, n: u32, var: f64, points: usize) -> Result<GridDensity> {
    let mut w = crude_window(base, a, n, var, points);
    let first = synthesize(base, a, n, var, &w)?;
    let thr = TRIM_REL * first.max_value();
    let v = first.values();
    let margin = ALIAS_STEPS + 2;
    let i0 = v.iter().position(|p| *p > thr).unwrap_or(0);
    let i1 = v.iter().rposition(|p| *p > thr).unwrap_or(v.len() - 1);
    if i0 > margin {
        w.lo = first.x(i0 - margin);
        w.hard_lo = false;
    }
    if i1 + margin < v.len() - 1 {
        w.hi = first.x(i1 + margin);
        w.hard_hi = false;
    }
    if w.lo == first.x_min() && w.hi == first.x_max() {
        return Ok(first);
    }
    synthesize(base, a, n, var, &w)
}

/// Standardized sum `U_n = (X_1 + … + X_n)/√(nσ²)` on `points` nodes.
pub fn standardized_sum(base: &GridDensity, n: u32, points: usize) -> Result<GridDensity> {
    let s = standardize(base)?;
    if n == 1 {
        return Ok(s);
    }
    standardize(&combination_law(&s, 1.0 / (n as f64).sqrt(), n, 0.0, points)?)
}

/// `√(1−t) X + √t Z` for the standardized version of `base`.
pub fn gaussian_smoothing(base: &GridDensity, t: f64, points: usize) -> Result<GridDensity> {
    if !(t > 0.0 && t < 1.0) {
        return Err(Error::InvalidParams(format!("smoothing time must lie in (0, 1), got {t}")));
    }
    let s = standardize(base)?;
    combination_law(&s, (1.0 - t).sqrt(), 1, t, points)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::family::{materialize, Family, GridSpec};
    use crate::info::standardized_fisher;

    fn std_mat(f: Family) -> GridDensity {
        materialize(&f.standardized(), &GridSpec::default()).unwrap()
    }

    fn phi(x: f64) -> f64 {
        (-0.5 * x * x).exp() / (2.0 * std::f64::consts::PI).sqrt()
    }

    #[test]
    fn normal_is_stable() {
        let d = std_mat(Family::normal(0.0, 1.0));
        for n in [2, 5, 16] {
            let u = standardized_sum(&d, n, 4096).unwrap();
            let err = (0..u.len()).map(|i| (u.values()[i] - phi(u.x(i))).abs()).fold(0.0, f64::max);
            assert!(err < 1e-6, "n={n} err={err}");
        }
    }

    #[test]
    fn exponential_sums_are_gamma() {
        let d = std_mat(Family::exponential(1.0));
        for n in [4u32, 8, 16] {
            let u = standardized_sum(&d, n, 4096).unwrap();
            let k = n as f64;
            let g = Family::gamma(k);
            let sd = k.sqrt();
            let err = (0..u.len())
                .map(|i| (u.values()[i] - sd * g.pdf(k + sd * u.x(i))).abs())
                .fold(0.0, f64::max);
            assert!(err < 1e-6, "n={n} err={err}");
            let j = standardized_fisher(&u);
            let want = 2.0 / (k - 2.0);
            assert!(((j - want) / want).abs() < 1e-3, "n={n} J={j}");
        }
    }

    #[test]
    fn smoothing_of_normal_is_normal() {
        let d = std_mat(Family::normal(0.0, 1.0));
        let s = gaussian_smoothing(&d, 0.3, 4096).unwrap();
        let err = (0..s.len()).map(|i| (s.values()[i] - phi(s.x(i))).abs()).fold(0.0, f64::max);
        assert!(err < 1e-8, "{err}");
    }

    #[test]
    fn narrow_window_reports_aliasing() {
        let d = std_mat(Family::normal(0.0, 1.0));
        let w = Window { lo: -3.0, hi: 3.0, points: 512, hard_lo: false, hard_hi: false };
        assert!(matches!(synthesize(&d, 1.0, 1, 0.0, &w), Err(Error::Aliasing(_))));
    }
}
