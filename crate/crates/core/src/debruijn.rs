//! Relative entropy as an integral of Fisher distances along the Gaussian
//! smoothing path `X_t = √(1−t) X + √t Z`:
//!
//! `D(X) = ∫₀¹ J(X_t) / (2(1−t)) dt`.

use std::num::NonZeroUsize;

use gauss_quad::legendre::GaussLegendre;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::density::standardize;
use crate::error::{Error, Result};
use crate::grid::GridDensity;
use crate::info::{relative_entropy, standardized_fisher};
use crate::report::{csv_table, fmt_real};
use crate::spectral::gaussian_smoothing;

pub const DEFAULT_NODES: usize = 24;
pub const DEFAULT_CLIP: f64 = 1e-4;
/// Largest relative change of the integral under node doubling.
pub const DOUBLING_TOL: f64 = 2e-3;
/// The path starts where the smoothing width is this many grid steps.
const START_STEPS: f64 = 6.0;
/// Panel breaks in `θ = √t` between the start and `√(1−clip)`.
const BREAKS: [f64; 2] = [0.2, 0.6];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeBruijnPath {
    pub t_nodes: Vec<f64>,
    #[serde(rename = "J_path")]
    pub j_path: Vec<f64>,
    /// Quadrature weights in `t` for the integrand `J/(2(1−t))`.
    pub weights: Vec<f64>,
    /// Integral over the resolved range `[t_start, 1 − clip]`.
    pub d_clipped: f64,
    /// Power-law estimate on `[0, t_start]`.
    pub lower_tail: f64,
    /// Power-law estimate on `[1 − clip, 1]`.
    pub upper_tail: f64,
    #[serde(rename = "D_integral")]
    pub d_integral: f64,
    #[serde(rename = "D_direct")]
    pub d_direct: f64,
    pub t_start: f64,
    pub clip: f64,
    /// Relative change of `D_integral` against the half-node rule.
    pub doubling_change: f64,
}

impl DeBruijnPath {
    pub fn relative_gap(&self) -> f64 {
        (self.d_integral - self.d_direct).abs() / self.d_direct.max(1e-8)
    }

    /// Largest increase of `J` between successive path nodes.
    pub fn max_increase(&self) -> f64 {
        self.j_path.windows(2).map(|w| w[1] - w[0]).fold(0.0, f64::max)
    }

    pub fn integrand(&self) -> Vec<f64> {
        self.t_nodes.iter().zip(&self.j_path).map(|(t, j)| j / (2.0 * (1.0 - t))).collect()
    }

    /// Table with columns `t, J, weight, integrand`.
    pub fn to_csv(&self) -> String {
        let rows: Vec<Vec<String>> = self
            .t_nodes
            .iter()
            .zip(&self.j_path)
            .zip(&self.weights)
            .zip(self.integrand())
            .map(|(((t, j), w), g)| vec![fmt_real(*t), fmt_real(*j), fmt_real(*w), fmt_real(g)])
            .collect();
        csv_table(&["t", "J", "weight", "integrand"], &rows)
    }
}

struct Rule {
    t: Vec<f64>,
    w: Vec<f64>,
}

/// Gauss–Legendre panels in `θ`, mapped to nodes and weights in `t = θ²`.
fn rule(theta_lo: f64, theta_hi: f64, per_panel: usize) -> Rule {
    let gl = GaussLegendre::new(NonZeroUsize::new(per_panel.max(2)).unwrap_or(NonZeroUsize::MIN));
    let mut edges = vec![theta_lo];
    edges.extend(BREAKS.iter().copied().filter(|b| *b > theta_lo && *b < theta_hi));
    edges.push(theta_hi);
    let (mut t, mut w) = (Vec::new(), Vec::new());
    for e in edges.windows(2) {
        let (a, b) = (e[0], e[1]);
        let mut pts: Vec<(f64, f64)> = gl
            .as_node_weight_pairs()
            .iter()
            .map(|(x, wx)| (0.5 * (a + b) + 0.5 * (b - a) * x, 0.5 * (b - a) * wx))
            .collect();
        pts.sort_by(|p, q| p.0.total_cmp(&q.0));
        for (th, wt) in pts {
            t.push(th * th);
            w.push(2.0 * th * wt);
        }
    }
    Rule { t, w }
}

/// `∫₀^{t₀} (a/√t + b) dt / 2` for the law through the two first nodes.
/// Jump densities have `J(X_t) ~ a/√t`; smooth ones have `a = 0`.
fn lower_tail(t: &[f64], j: &[f64], t0: f64) -> f64 {
    let (r0, r1) = (t[0].sqrt(), t[1].sqrt());
    let b = (j[1] * r1 - j[0] * r0) / (r1 - r0);
    let a = j[0] * r0 - b * r0;
    (a * t0.sqrt() + 0.5 * b * t0).max(0.0)
}

/// `∫_{1−clip}^1 c (1−t)^{k−1} dt / 2` for the law `J = c (1−t)^k` through
/// the two last nodes.
fn upper_tail(t: &[f64], j: &[f64], clip: f64) -> f64 {
    let n = t.len();
    let (ja, jb) = (j[n - 2], j[n - 1]);
    if ja <= 0.0 || jb <= 0.0 {
        return 0.0;
    }
    let (ua, ub) = (1.0 - t[n - 2], 1.0 - t[n - 1]);
    let k = (ja / jb).ln() / (ua / ub).ln();
    if !(k > 0.0) {
        return 0.0;
    }
    let c = jb / ub.powf(k);
    c * clip.powf(k) / (2.0 * k)
}

fn path(d: &GridDensity, nodes: usize, clip: f64, t_start: f64) -> Result<DeBruijnPath> {
    let r = rule(t_start.sqrt(), (1.0 - clip).sqrt(), nodes.div_ceil(BREAKS.len() + 1));
    let points = d.len();
    let j: Vec<f64> = r
        .t
        .par_iter()
        .map(|&t| gaussian_smoothing(d, t, points).map(|s| standardized_fisher(&s)))
        .collect::<Result<_>>()?;
    if j.iter().any(|v| !v.is_finite()) {
        return Err(Error::Quadrature("infinite Fisher information on the smoothing path".into()));
    }
    let d_clipped: f64 = r.t.iter().zip(&j).zip(&r.w).map(|((t, jv), w)| w * jv / (2.0 * (1.0 - t))).sum();
    let lower = lower_tail(&r.t, &j, t_start);
    let upper = upper_tail(&r.t, &j, clip);
    Ok(DeBruijnPath {
        t_nodes: r.t,
        j_path: j,
        weights: r.w,
        d_clipped,
        lower_tail: lower,
        upper_tail: upper,
        d_integral: d_clipped + lower + upper,
        d_direct: relative_entropy(d),
        t_start,
        clip,
        doubling_change: 0.0,
    })
}

/// Integrates the path on `nodes` Gauss–Legendre nodes in `√t` over
/// `[t₀, 1 − clip]`, where `√t₀` is six grid steps, and adds power-law
/// estimates of both end pieces. The rule with half as many nodes must
/// agree within `2e−3` relative.
pub fn debruijn_entropy(d: &GridDensity, nodes: usize, clip: f64) -> Result<DeBruijnPath> {
    if nodes < 6 {
        return Err(Error::InvalidParams(format!("at least 6 path nodes required, got {nodes}")));
    }
    if !(clip > 0.0 && clip < 0.1) {
        return Err(Error::InvalidParams(format!("clip must lie in (0, 0.1), got {clip}")));
    }
    let s = standardize(d)?;
    let t_start = (START_STEPS * s.h()).powi(2);
    if t_start >= 0.04 {
        return Err(Error::InvalidGrid(format!("grid step {} too coarse for the smoothing path", s.h())));
    }
    let coarse = path(&s, nodes / 2, clip, t_start)?;
    let mut fine = path(&s, nodes, clip, t_start)?;
    let change = (fine.d_integral - coarse.d_integral).abs() / fine.d_integral.abs().max(1e-8);
    fine.doubling_change = change;
    if fine.d_integral.abs() > 1e-8 && change > DOUBLING_TOL {
        return Err(Error::Quadrature(format!(
            "node doubling changed the integral by {change:.3e} ({} vs {})",
            coarse.d_integral, fine.d_integral
        )));
    }
    Ok(fine)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::family::{materialize, Family, GridSpec};

    #[test]
    fn weights_integrate_polynomials_in_t() {
        let r = rule(0.05, 0.99, 8);
        let s: f64 = r.t.iter().zip(&r.w).map(|(t, w)| w * t).sum();
        let want = 0.5 * (0.99f64.powi(4) - 0.05f64.powi(4));
        assert!((s - want).abs() < 1e-12);
        assert!(r.t.windows(2).all(|p| p[0] < p[1]));
    }

    #[test]
    fn normal_path_is_flat() {
        let d = materialize(&Family::normal(0.0, 1.0).spec(), &GridSpec::default()).unwrap();
        let p = debruijn_entropy(&d, DEFAULT_NODES, DEFAULT_CLIP).unwrap();
        assert!(p.d_integral.abs() < 1e-8, "{}", p.d_integral);
    }

    #[test]
    fn mixture_matches_direct_entropy() {
        let d = materialize(&Family::two_bump().standardized(), &GridSpec::default()).unwrap();
        let p = debruijn_entropy(&d, DEFAULT_NODES, DEFAULT_CLIP).unwrap();
        assert!(p.relative_gap() < 1e-2, "{} vs {}", p.d_integral, p.d_direct);
        assert!(p.max_increase() < 1e-6);
    }

    #[test]
    fn exponential_matches_direct_entropy() {
        let d = materialize(&Family::exponential(1.0).standardized(), &GridSpec::default()).unwrap();
        let p = debruijn_entropy(&d, DEFAULT_NODES, DEFAULT_CLIP).unwrap();
        assert!(p.relative_gap() < 2e-2, "{p:?}");
        let exact = 0.5 * (2.0 * std::f64::consts::PI * std::f64::consts::E).ln() - 1.0;
        assert!((p.d_direct - exact).abs() < 1e-4);
    }
}
