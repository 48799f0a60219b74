//! Scores, Fisher information, relative entropy and distances to the normal.

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{Error, Result};
use crate::grid::{GridDensity, GridFunction};
use crate::report::extended;

/// Default relative density floor for score masks.
pub const DEFAULT_FLOOR: f64 = 1e-12;
/// Growth per refinement above which a Fisher integral is declared infinite.
pub const DIVERGENCE_GROWTH: f64 = 0.10;
/// `1 + √(6/π)`.
pub fn sup_constant() -> f64 {
    1.0 + (6.0 / std::f64::consts::PI).sqrt()
}

/// Score `ρ = (log p)'` on the nodes where the density is above the floor.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreField {
    pub score: GridFunction,
    pub valid_mask: Vec<bool>,
    pub density_ref: GridDensity,
    pub floor: f64,
}

impl ScoreField {
    /// `∫ p ρ²` over the mask.
    pub fn fisher_integral(&self) -> f64 {
        self.masked_expect(|_, r| r * r)
    }

    /// `∫ p ρ`.
    pub fn mean_score(&self) -> f64 {
        self.masked_expect(|_, r| r)
    }

    /// `∫ p (x - μ) ρ`.
    pub fn mean_x_score(&self) -> f64 {
        let m = self.density_ref.mean();
        self.masked_expect(|x, r| (x - m) * r)
    }

    /// Trapezoid expectation of `f(x, ρ(x))` restricted to the mask.
    pub fn masked_expect(&self, f: impl Fn(f64, f64) -> f64) -> f64 {
        let d = &self.density_ref;
        let n = d.len();
        let mut s = 0.0;
        for i in 0..n {
            if self.valid_mask[i] {
                let w = if i == 0 || i == n - 1 { 0.5 } else { 1.0 };
                s += w * d.values()[i] * f(d.x(i), self.score.values[i]);
            }
        }
        s * d.h()
    }

    pub fn value(&self, i: usize) -> Option<f64> {
        if self.valid_mask[i] {
            Some(self.score.values[i])
        } else {
            None
        }
    }
}

/// Log-derivative by central differences on the mask `p > floor_rel·max p`,
/// one-sided at mask boundaries.
pub fn score(d: &GridDensity, floor_rel: f64) -> Result<ScoreField> {
    if !(floor_rel > 0.0 && floor_rel <= 1e-2) {
        return Err(Error::InvalidParams(format!("floor must lie in (0, 1e-2], got {floor_rel}")));
    }
    let p = d.values();
    let n = p.len();
    let cut = floor_rel * d.max_value();
    let mut mask: Vec<bool> = p.iter().map(|v| *v > cut).collect();
    let lp: Vec<f64> = p.iter().zip(&mask).map(|(v, m)| if *m { v.ln() } else { 0.0 }).collect();
    let h = d.h();
    let ok = |i: isize, mask: &[bool]| i >= 0 && (i as usize) < n && mask[i as usize];
    let mut rho = vec![0.0; n];
    for i in 0..n {
        if !mask[i] {
            continue;
        }
        let ii = i as isize;
        let (l1, r1) = (ok(ii - 1, &mask), ok(ii + 1, &mask));
        rho[i] = if l1 && r1 {
            (lp[i + 1] - lp[i - 1]) / (2.0 * h)
        } else if r1 && ok(ii + 2, &mask) {
            (-3.0 * lp[i] + 4.0 * lp[i + 1] - lp[i + 2]) / (2.0 * h)
        } else if r1 {
            (lp[i + 1] - lp[i]) / h
        } else if l1 && ok(ii - 2, &mask) {
            (3.0 * lp[i] - 4.0 * lp[i - 1] + lp[i - 2]) / (2.0 * h)
        } else if l1 {
            (lp[i] - lp[i - 1]) / h
        } else {
            f64::NAN
        };
    }
    for i in 0..n {
        if rho[i].is_nan() {
            mask[i] = false;
            rho[i] = 0.0;
        }
    }
    if !mask.iter().any(|m| *m) {
        return Err(Error::DegenerateDensity);
    }
    Ok(ScoreField {
        score: GridFunction::new(d.x_min(), h, rho),
        valid_mask: mask,
        density_ref: d.clone(),
        floor: floor_rel,
    })
}

fn fisher_raw(d: &GridDensity) -> f64 {
    match score(d, DEFAULT_FLOOR) {
        Ok(s) => s.fisher_integral(),
        Err(_) => f64::INFINITY,
    }
}

/// Fisher information with its refinement evidence.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FisherEstimate {
    #[serde(with = "extended")]
    pub value: f64,
    pub finest: f64,
    /// `(h, I(h))` from the coarsest rung to the native grid.
    pub refinement_trace: Vec<(f64, f64)>,
    pub extrapolated: bool,
    pub divergent: bool,
    pub growth_threshold: f64,
}

impl FisherEstimate {
    pub fn is_finite(&self) -> bool {
        self.value.is_finite()
    }
}

fn trace_aligned(d: &GridDensity, anchor: usize, steps: &[usize]) -> Vec<(f64, f64)> {
    steps
        .iter()
        .map(|&s| {
            let off = anchor % s;
            let v = d.subsample(s, off).map(|c| fisher_raw(&c)).unwrap_or(f64::INFINITY);
            (d.h() * s as f64, v)
        })
        .collect()
}

fn grows_every_step(trace: &[(f64, f64)]) -> bool {
    trace.len() >= 4
        && trace.windows(2).all(|w| !w[1].1.is_finite() || w[1].1 > w[0].1 * (1.0 + DIVERGENCE_GROWTH))
}

/// `I = ∫ p ρ²`, evaluated on the native grid and on grids coarsened by
/// 2, 4 and 8 (each aligned with a support edge so jumps stay visible).
///
/// The value is declared infinite when all three refinements grow the
/// integral by more than 10%. Otherwise the native-grid value is returned,
/// Richardson-extrapolated when the two successive difference ratios agree
/// within 15% and indicate an order between about 0.7 and 2.6.
pub fn fisher_information(d: &GridDensity) -> FisherEstimate {
    let n = d.len();
    let steps: Vec<usize> = [8usize, 4, 2, 1].into_iter().filter(|s| n / s >= 64).collect();
    // anchor coarse grids on the support edges: the zero node before a
    // continuous edge, the first positive node of a jump
    let (first, last) = d.support_nodes();
    let left = trace_aligned(d, first, &steps);
    let right = trace_aligned(d, last, &steps);
    let finest = left.last().map(|t| t.1).unwrap_or(f64::INFINITY);
    let divergent = grows_every_step(&left) || grows_every_step(&right) || !finest.is_finite();
    let mut value = finest;
    let mut extrapolated = false;
    if !divergent && left.len() >= 4 {
        let v: Vec<f64> = left.iter().map(|t| t.1).collect();
        let (d1, d2, d3) = (v[1] - v[0], v[2] - v[1], v[3] - v[2]);
        if d2 != 0.0 && d3 != 0.0 {
            let (r1, r2) = (d1 / d2, d2 / d3);
            let good = |r: f64| (1.6..=6.0).contains(&r);
            if good(r1) && good(r2) && ((r1 - r2) / r2).abs() <= 0.15 {
                value = v[3] + d3 / (r2 - 1.0);
                extrapolated = true;
            }
        }
    }
    FisherEstimate {
        value: if divergent { f64::INFINITY } else { value },
        finest,
        refinement_trace: left,
        extrapolated,
        divergent,
        growth_threshold: DIVERGENCE_GROWTH,
    }
}

/// `J = σ² I − 1`; infinite when `I` is.
pub fn standardized_fisher(d: &GridDensity) -> f64 {
    let i = fisher_information(d).value;
    if i.is_finite() {
        d.variance() * i - 1.0
    } else {
        f64::INFINITY
    }
}

/// `J` from the native-grid integral only, without refinement.
pub fn standardized_fisher_raw(d: &GridDensity) -> f64 {
    d.variance() * fisher_raw(d) - 1.0
}

/// `∫ p log(p / φ)` against the normal with the same mean and variance.
pub fn relative_entropy(d: &GridDensity) -> f64 {
    let plain = d.plain_samples();
    let w = plain.weights(d.h());
    let mut s = 0.0;
    for (p, w) in plain.values.iter().zip(&w) {
        if *p > 0.0 {
            s += w * p * p.ln();
        }
    }
    s + 0.5 * (2.0 * std::f64::consts::PI * std::f64::consts::E * d.variance()).ln()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InfoSummary {
    #[serde(with = "extended")]
    pub fisher_i: f64,
    #[serde(with = "extended")]
    pub standardized_j: f64,
    pub rel_entropy_d: f64,
    pub sigma2: f64,
    pub refinement_trace: Vec<(f64, f64)>,
    pub extrapolated: bool,
    pub growth_threshold: f64,
}

pub fn info_summary(d: &GridDensity) -> InfoSummary {
    let f = fisher_information(d);
    let j = if f.is_finite() { d.variance() * f.value - 1.0 } else { f64::INFINITY };
    InfoSummary {
        fisher_i: f.value,
        standardized_j: j,
        rel_entropy_d: relative_entropy(d),
        sigma2: d.variance(),
        refinement_trace: f.refinement_trace,
        extrapolated: f.extrapolated,
        growth_threshold: f.growth_threshold,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DistanceChain {
    pub sup_diff: f64,
    pub tv: f64,
    pub hellinger: f64,
    #[serde(rename = "J", with = "extended")]
    pub j: f64,
}

impl DistanceChain {
    pub fn sup_bound(&self) -> f64 {
        sup_constant() * self.j.max(0.0).sqrt()
    }

    pub fn hellinger_bound(&self) -> f64 {
        std::f64::consts::SQRT_2 * self.j.max(0.0).sqrt()
    }

    pub fn tv_ok(&self) -> bool {
        self.tv <= 2.0 * self.hellinger + 1e-12
    }

    pub fn sup_ok(&self) -> bool {
        !self.j.is_finite() || self.sup_diff <= self.sup_bound() + 1e-12
    }

    /// Compared in squares, `4H² ≤ 2J`.
    pub fn hellinger_ok(&self) -> bool {
        !self.j.is_finite() || 4.0 * self.hellinger * self.hellinger <= 2.0 * self.j.max(0.0) + 1e-12
    }

    pub fn holds(&self) -> bool {
        self.tv_ok() && self.sup_ok() && self.hellinger_ok()
    }
}

/// Sup, total variation and Hellinger distances to `N(0,1)`, with the part
/// of the normal mass lying outside the grid included exactly.
pub fn distance_chain(d: &GridDensity) -> DistanceChain {
    distance_chain_with_j(d, standardized_fisher(d))
}

pub fn distance_chain_with_j(d: &GridDensity, j: f64) -> DistanceChain {
    let z = Normal::new(0.0, 1.0).unwrap();
    let phi = |x: f64| (-0.5 * x * x).exp() / (2.0 * std::f64::consts::PI).sqrt();
    let n = d.len();
    let (lo, hi) = (d.x_min(), d.x_max());
    let outside = z.cdf(lo) + z.sf(hi);
    let left = if lo > 0.0 { phi(0.0) } else { phi(lo) };
    let right = if hi < 0.0 { phi(0.0) } else { phi(hi) };
    let mut sup = left.max(right);
    let mut tv = 0.0;
    let mut hel = 0.0;
    for (i, p) in d.values().iter().enumerate() {
        let f = phi(d.x(i));
        let w = if i == 0 || i == n - 1 { 0.5 } else { 1.0 };
        sup = sup.max((p - f).abs());
        tv += w * (p - f).abs();
        hel += w * (p.sqrt() - f.sqrt()).powi(2);
    }
    DistanceChain {
        sup_diff: sup,
        tv: tv * d.h() + outside,
        hellinger: (hel * d.h() + outside).sqrt(),
        j,
    }
}

/// `ψ(R) = σ² E[ρ² 1(|X − μ| ≥ σR)]` for each radius.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TailProfile {
    pub radii: Vec<f64>,
    pub psi: Vec<f64>,
    pub fisher_infinite: bool,
}

impl TailProfile {
    pub fn non_increasing(&self) -> bool {
        self.psi.windows(2).all(|w| w[1] <= w[0] + 1e-12)
    }
}

/// Tail fractions are measured on the native grid and scaled to the refined
/// total, so `ψ(0) = σ² I` with `I` from [`fisher_information`].
pub fn tail_score_mass(d: &GridDensity, radii: &[f64]) -> Result<TailProfile> {
    let s = score(d, DEFAULT_FLOOR)?;
    let fi = fisher_information(d);
    let raw_total = s.fisher_integral();
    let scale = if fi.is_finite() && raw_total > 0.0 { fi.value / raw_total } else { 1.0 };
    let (m, sd, v, h) = (d.mean(), d.sd(), d.variance(), d.h());
    let psi = radii
        .iter()
        .map(|r| {
            // cell fraction beyond the radius, so the cut is second order in h
            let tail = s.masked_expect(|x, rho| {
                let frac = if *r <= 0.0 { 1.0 } else { (((x - m).abs() - sd * r) / h + 0.5).clamp(0.0, 1.0) };
                frac * rho * rho
            });
            v * tail * scale
        })
        .collect();
    Ok(TailProfile { radii: radii.to_vec(), psi, fisher_infinite: !fi.is_finite() })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::density::standardize;
    use crate::family::{materialize, Family, GridSpec};

    fn mat(f: Family) -> GridDensity {
        materialize(&f.spec(), &GridSpec::default()).unwrap()
    }

    fn std_mat(f: Family) -> GridDensity {
        materialize(&f.standardized(), &GridSpec::default()).unwrap()
    }

    #[test]
    fn gaussian_score_is_linear() {
        let d = mat(Family::normal(0.0, 2.0));
        let s = score(&d, DEFAULT_FLOOR).unwrap();
        for i in 0..d.len() {
            if let Some(r) = s.value(i) {
                assert!((r + d.x(i) / 2.0).abs() < 1e-4, "x={} r={r}", d.x(i));
            }
        }
    }

    #[test]
    fn gamma_score_matches_analytic() {
        let k = 5.0;
        let d = std_mat(Family::gamma(k));
        let s = score(&d, DEFAULT_FLOOR).unwrap();
        let sd = k.sqrt();
        let mut checked = 0;
        for i in 0..d.len() {
            let y = d.x(i);
            let x = k + sd * y;
            if let Some(r) = s.value(i) {
                if x > 2.0 && d.values()[i] > 1e-8 {
                    let want = sd * ((k - 1.0) / x - 1.0);
                    assert!((r - want).abs() < 1e-3, "y={y} r={r} want={want}");
                    checked += 1;
                }
            }
        }
        assert!(checked > 1000);
    }

    #[test]
    fn exponential_interior_score() {
        let d = std_mat(Family::exponential(1.0));
        let s = score(&d, DEFAULT_FLOOR).unwrap();
        for i in 0..d.len() {
            let x = d.x(i);
            if x > -1.0 + 0.1 && x < 15.0 {
                assert!((s.value(i).unwrap() + 1.0).abs() < 1e-4);
            }
        }
        let first = s.valid_mask.iter().position(|m| *m).unwrap();
        assert!(d.x(first) >= -1.0 - 1e-9);
    }

    #[test]
    fn fisher_examples() {
        let n = mat(Family::normal(0.0, 1.0));
        assert!((fisher_information(&n).value - 1.0).abs() < 1e-5);
        let g3 = mat(Family::gamma(3.0));
        assert!((fisher_information(&g3).value - 1.0).abs() < 1e-3);
        let e = std_mat(Family::exponential(1.0));
        assert!(!fisher_information(&e).is_finite());
    }

    #[test]
    fn standardized_fisher_examples() {
        assert!(standardized_fisher(&mat(Family::normal(0.0, 7.0))).abs() < 1e-5);
        assert!((standardized_fisher(&std_mat(Family::gamma(3.0))) - 2.0).abs() < 2e-3);
        assert!((standardized_fisher(&std_mat(Family::gamma(10.0))) - 0.25).abs() < 1e-3);
    }

    #[test]
    fn mixture_j_stable_under_refinement() {
        let a = materialize(&Family::two_bump().spec(), &GridSpec::with_points(4096)).unwrap();
        let b = materialize(&Family::two_bump().spec(), &GridSpec::with_points(8192)).unwrap();
        let (ja, jb) = (standardized_fisher(&a), standardized_fisher(&b));
        assert!(ja > 0.0);
        assert!((ja - jb).abs() < 1e-4, "{ja} {jb}");
    }

    #[test]
    fn relative_entropy_examples() {
        assert!(relative_entropy(&mat(Family::normal(0.0, 1.0))).abs() < 1e-8);
        assert!(relative_entropy(&mat(Family::normal(2.0, 3.0))).abs() < 1e-8);
        let a = materialize(&Family::two_bump().spec(), &GridSpec::with_points(4096)).unwrap();
        let b = materialize(&Family::two_bump().spec(), &GridSpec::with_points(8192)).unwrap();
        let (da, db) = (relative_entropy(&a), relative_entropy(&b));
        assert!(da > 0.0);
        assert!((da - db).abs() < 1e-5);
    }

    #[test]
    fn entropy_with_jumps_matches_closed_form() {
        let d = std_mat(Family::exponential(1.0));
        let exact = 0.5 * (2.0 * std::f64::consts::PI * std::f64::consts::E).ln() - 1.0;
        assert!((relative_entropy(&d) - exact).abs() < 1e-5, "{}", relative_entropy(&d) - exact);
        let u = std_mat(Family::uniform(0.0, 1.0));
        let exact = 0.5 * (2.0 * std::f64::consts::PI * std::f64::consts::E / 12.0).ln();
        assert!((relative_entropy(&u) - exact).abs() < 1e-5, "{}", relative_entropy(&u) - exact);
    }

    #[test]
    fn distance_chain_examples() {
        let n = mat(Family::normal(0.0, 1.0));
        let c = distance_chain(&n);
        assert!(c.sup_diff < 1e-6 && c.tv < 1e-6 && c.hellinger < 1e-6);
        let g = std_mat(Family::gamma(8.0));
        let c = distance_chain(&g);
        assert!(c.holds());
        assert!(c.sup_diff <= 2.382 * c.j.sqrt());
        assert!(c.tv <= std::f64::consts::SQRT_2 * c.j.sqrt());
        for f in [Family::exponential(1.0), Family::uniform(0.0, 1.0), Family::laplace(0.0, 1.0), Family::two_bump()] {
            let c = distance_chain(&std_mat(f));
            assert!(c.tv_ok());
        }
        assert!((sup_constant() - 2.382).abs() < 1e-3);
    }

    #[test]
    fn tail_profile_examples() {
        let n = mat(Family::normal(0.0, 1.0));
        let t = tail_score_mass(&n, &[0.0, 10.0]).unwrap();
        assert!((t.psi[0] - n.variance() * fisher_information(&n).value).abs() < 1e-6);
        assert!(t.psi[1] < 1e-10);
        let g = std_mat(Family::gamma(6.0));
        let t = tail_score_mass(&g, &[0.0, 1.0, 2.0, 3.0, 4.0]).unwrap();
        assert!(t.non_increasing());
        assert!((t.psi[0] - g.variance() * fisher_information(&g).value).abs() < 1e-6);
    }

    #[test]
    fn score_moment_identities() {
        for f in [Family::gamma(5.0), Family::two_bump(), Family::normal(0.0, 1.0), Family::laplace(0.0, 1.0)] {
            let d = standardize(&mat(f)).unwrap();
            let s = score(&d, DEFAULT_FLOOR).unwrap();
            assert!(s.mean_score().abs() < 1e-4);
            assert!((s.mean_x_score() + 1.0).abs() < 1e-3);
        }
    }

    #[test]
    fn floor_bounds_checked() {
        let d = mat(Family::normal(0.0, 1.0));
        assert!(score(&d, 0.0).is_err());
        assert!(score(&d, 0.5).is_err());
    }
}
