//! Poincaré constants by the discretized variational problem.
//!
//! On the support block the form `E g'²` is assembled from midpoint
//! differences weighted by the midpoint density, and `E g²` from lumped
//! trapezoid masses. With `y = M^{1/2} g` the constants are reciprocals of
//! eigenvalues of the symmetric tridiagonal `A = M^{-1/2} K M^{-1/2}`.

use serde::{Deserialize, Serialize};

use crate::density::conditional_truncate;
use crate::error::{Error, Result};
use crate::grid::{GridDensity, GridFunction};
use crate::report::extended;
use crate::tridiag::SymTridiag;

pub const EIGEN_TOL: f64 = 1e-10;
pub const MAX_ITERS: usize = 500;
/// Relative density below which nodes are excised.
pub const POINCARE_FLOOR: f64 = 1e-12;
/// Floors of the domain-extension trace, coarse to fine.
pub const EXTENSION_FLOORS: [f64; 3] = [1e-4, 1e-8, 1e-12];
/// Growth per extension step above which the constant is declared infinite.
pub const EXTENSION_GROWTH: f64 = 0.10;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Constraint {
    Full,
    Restricted,
    Truncated { t: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PoincareEstimate {
    #[serde(with = "extended")]
    pub value: f64,
    #[serde(skip)]
    pub extremal: GridFunction,
    pub constraint: Constraint,
    pub rayleigh_residual: f64,
    pub iterations: usize,
    pub refinement_trace: Vec<(f64, f64)>,
    pub extension_trace: Vec<(f64, f64)>,
    pub infinite: bool,
}

impl PoincareEstimate {
    /// `E g² / E g'²` of the extremal under the discrete forms.
    pub fn rayleigh_of_extremal(&self, d: &GridDensity) -> f64 {
        rayleigh_quotient(d, &self.extremal.values)
    }
}

/// Solver settings.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PoincareOptions {
    pub floor: f64,
    pub tol: f64,
    pub max_iters: usize,
    /// Evaluate the refinement and domain-extension traces.
    pub traces: bool,
}

impl Default for PoincareOptions {
    fn default() -> Self {
        PoincareOptions { floor: POINCARE_FLOOR, tol: EIGEN_TOL, max_iters: MAX_ITERS, traces: true }
    }
}

/// Discrete forms on the support block `lo..=hi`.
struct Forms {
    lo: usize,
    mass: Vec<f64>,
    mid: Vec<f64>,
    h: f64,
}

impl Forms {
    fn build(d: &GridDensity, floor: f64) -> Result<Self> {
        let plain = d.plain_samples();
        let p = &plain.values;
        let cut = floor * p.iter().cloned().fold(0.0, f64::max);
        let above: Vec<bool> = p.iter().map(|v| *v > cut).collect();
        let mut best = (0, 0, 0);
        let mut i = 0;
        while i < p.len() {
            if above[i] {
                let s = i;
                while i < p.len() && above[i] {
                    i += 1;
                }
                if i - s > best.2 {
                    best = (s, i - 1, i - s);
                }
            } else {
                i += 1;
            }
        }
        let (lo, hi, len) = best;
        if len < 8 {
            return Err(Error::DisconnectedSupport);
        }
        let h = d.h();
        let w = plain.weights(h);
        let full = d.weights();
        let mass: Vec<f64> = (lo..=hi)
            .map(|i| {
                let wi = if plain.lo <= i && i <= plain.hi { w[i] } else { full[i] };
                wi * p[i]
            })
            .collect();
        let mid: Vec<f64> = (lo..hi).map(|i| 0.5 * (p[i] + p[i + 1])).collect();
        Ok(Forms { lo, mass, mid, h })
    }

    fn len(&self) -> usize {
        self.mass.len()
    }

    fn operator(&self) -> Result<SymTridiag> {
        let n = self.len();
        let k: Vec<f64> = self.mid.iter().map(|m| m / self.h).collect();
        let mut diag = vec![0.0; n];
        for (i, ki) in k.iter().enumerate() {
            diag[i] += ki;
            diag[i + 1] += ki;
        }
        for (dv, m) in diag.iter_mut().zip(&self.mass) {
            *dv /= m;
        }
        let off = (0..n - 1).map(|i| -k[i] / (self.mass[i] * self.mass[i + 1]).sqrt()).collect();
        SymTridiag::new(diag, off)
    }

    /// `c1 = √M` (for `E g`) and `c2` with `c2·y = Σ p_mid Δg` (for `E g'`).
    fn constraints(&self) -> (Vec<f64>, Vec<f64>) {
        let n = self.len();
        let c1: Vec<f64> = self.mass.iter().map(|m| m.sqrt()).collect();
        let c2 = (0..n)
            .map(|j| {
                let left = if j > 0 { self.mid[j - 1] } else { 0.0 };
                let right = if j + 1 < n { self.mid[j] } else { 0.0 };
                (left - right) / c1[j]
            })
            .collect();
        (c1, c2)
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn normalize(v: &mut [f64]) -> f64 {
    let n = dot(v, v).sqrt();
    if n > 0.0 {
        v.iter_mut().for_each(|x| *x /= n);
    }
    n
}

fn project_out(v: &mut [f64], basis: &[Vec<f64>]) {
    for _ in 0..2 {
        for b in basis {
            let c = dot(v, b);
            v.iter_mut().zip(b).for_each(|(x, bi)| *x -= c * bi);
        }
    }
}

/// Orthonormalizes `cs` by Gram–Schmidt.
fn orthonormal(cs: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let mut out: Vec<Vec<f64>> = Vec::new();
    for c in cs {
        let mut v = c.clone();
        project_out(&mut v, &out);
        if normalize(&mut v) > 0.0 {
            out.push(v);
        }
    }
    out
}

struct EigenResult {
    lambda: f64,
    y: Vec<f64>,
    residual: f64,
    iters: usize,
}

/// Smallest eigenpair of `A` on the orthogonal complement of `cs`, by
/// shift-and-invert iteration with the constrained solve
/// `z = B⁻¹y − B⁻¹C(CᵀB⁻¹C)⁻¹CᵀB⁻¹y`, `B = A − σI`, then Rayleigh shifts.
fn constrained_min(a: &SymTridiag, cs: &[Vec<f64>], sigma0: f64, opts: &PoincareOptions) -> Result<EigenResult> {
    let n = a.len();
    let q = orthonormal(cs);
    let mut y: Vec<f64> = (0..n).map(|i| 1.0 + (i as f64 * 0.7548776662466927).fract()).collect();
    project_out(&mut y, &q);
    normalize(&mut y);
    let mut sigma = sigma0;
    let mut residual = f64::INFINITY;
    let mut polish = false;
    let (glo, ghi) = a.bounds();
    let scale = glo.abs().max(ghi.abs());
    for it in 1..=opts.max_iters {
        let lu = a.factor_shifted(sigma)?;
        let bc: Vec<Vec<f64>> = q
            .iter()
            .map(|c| {
                let mut v = c.clone();
                lu.solve(&mut v);
                v
            })
            .collect();
        let mut z = y.clone();
        lu.solve(&mut z);
        let k = q.len();
        if k > 0 {
            let mut g = vec![vec![0.0; k]; k];
            let mut r = vec![0.0; k];
            for i in 0..k {
                for j in 0..k {
                    g[i][j] = dot(&q[i], &bc[j]);
                }
                r[i] = dot(&q[i], &z);
            }
            let mu = solve_small(g, r);
            for (j, m) in mu.iter().enumerate() {
                z.iter_mut().zip(&bc[j]).for_each(|(zi, bi)| *zi -= m * bi);
            }
        }
        project_out(&mut z, &q);
        if normalize(&mut z) == 0.0 || z.iter().any(|v| !v.is_finite()) {
            return Err(Error::NoConvergence { iters: it, residual });
        }
        y = z;
        let ay = a.apply(&y);
        let lambda = dot(&y, &ay);
        let mut r: Vec<f64> = ay.iter().zip(&y).map(|(u, v)| u - lambda * v).collect();
        project_out(&mut r, &q);
        residual = dot(&r, &r).sqrt() / lambda.abs().max(f64::MIN_POSITIVE);
        let rounding = 64.0 * f64::EPSILON * scale / lambda.abs().max(f64::MIN_POSITIVE);
        if residual < opts.tol.max(rounding) {
            return Ok(EigenResult { lambda, y, residual, iters: it });
        }
        if !polish && residual < 1e-4 {
            polish = true;
        }
        if polish {
            sigma = lambda * (1.0 - 1e-9);
        }
    }
    Err(Error::NoConvergence { iters: opts.max_iters, residual })
}

fn solve_small(mut g: Vec<Vec<f64>>, mut r: Vec<f64>) -> Vec<f64> {
    let k = r.len();
    for c in 0..k {
        let p = (c..k).max_by(|&i, &j| g[i][c].abs().total_cmp(&g[j][c].abs())).unwrap_or(c);
        g.swap(c, p);
        r.swap(c, p);
        let piv = g[c][c];
        if piv == 0.0 {
            continue;
        }
        for i in c + 1..k {
            let f = g[i][c] / piv;
            for j in c..k {
                g[i][j] -= f * g[c][j];
            }
            r[i] -= f * r[c];
        }
    }
    let mut x = vec![0.0; k];
    for c in (0..k).rev() {
        let s: f64 = (c + 1..k).map(|j| g[c][j] * x[j]).sum();
        x[c] = if g[c][c] != 0.0 { (r[c] - s) / g[c][c] } else { 0.0 };
    }
    x
}

struct Solution {
    value: f64,
    extremal: Vec<f64>,
    residual: f64,
    iters: usize,
}

fn solve(d: &GridDensity, restricted: bool, opts: &PoincareOptions) -> Result<Solution> {
    let forms = Forms::build(d, opts.floor)?;
    let a = forms.operator()?;
    let (c1, c2) = forms.constraints();
    let l2 = a.eigenvalue(1);
    let l3 = a.eigenvalue(2);
    if !(l2 > 0.0) {
        return Err(Error::DisconnectedSupport);
    }
    let (cs, sigma) = if restricted {
        (vec![c1, c2], (l2 - 0.5 * (l3 - l2)).max(0.5 * l2))
    } else {
        (vec![c1], l2 * (1.0 - 1e-7))
    };
    let eig = constrained_min(&a, &cs, sigma, opts)?;
    let n = d.len();
    let mut g = vec![0.0; n];
    for (j, yj) in eig.y.iter().enumerate() {
        g[forms.lo + j] = yj / forms.mass[j].sqrt();
    }
    let last = forms.lo + forms.len() - 1;
    let (gl, gr) = (g[forms.lo], g[last]);
    g[..forms.lo].iter_mut().for_each(|v| *v = gl);
    g[last + 1..].iter_mut().for_each(|v| *v = gr);
    let norm = forms.mass.iter().zip(&eig.y).map(|(m, yj)| m * (yj / m.sqrt()).powi(2)).sum::<f64>().sqrt();
    g.iter_mut().for_each(|v| *v /= norm);
    Ok(Solution { value: 1.0 / eig.lambda, extremal: g, residual: eig.residual, iters: eig.iters })
}

/// `E g² / E g'²` with the solver's discrete forms at the default floor.
pub fn rayleigh_quotient(d: &GridDensity, g: &[f64]) -> f64 {
    match Forms::build(d, POINCARE_FLOOR) {
        Ok(f) => {
            let gs = &g[f.lo..f.lo + f.len()];
            let num: f64 = f.mass.iter().zip(gs).map(|(m, v)| m * v * v).sum();
            let mean: f64 = f.mass.iter().zip(gs).map(|(m, v)| m * v).sum::<f64>() / f.mass.iter().sum::<f64>();
            let num = num - mean * mean * f.mass.iter().sum::<f64>();
            let den: f64 = f.mid.iter().enumerate().map(|(i, m)| m * (gs[i + 1] - gs[i]).powi(2) / f.h).sum();
            num / den
        }
        Err(_) => f64::NAN,
    }
}

fn trace_values(d: &GridDensity, restricted: bool, opts: &PoincareOptions) -> (Vec<(f64, f64)>, Vec<(f64, f64)>) {
    let quiet = PoincareOptions { traces: false, ..*opts };
    let (lo, _) = d.support_nodes();
    let mut refinement = Vec::new();
    for step in [4usize, 2] {
        if d.len() / step < 64 {
            continue;
        }
        let off = lo % step;
        if let Ok(c) = d.subsample(step, off) {
            if let Ok(s) = solve(&c, restricted, &quiet) {
                refinement.push((c.h(), s.value));
            }
        }
    }
    let mut extension = Vec::new();
    for f in EXTENSION_FLOORS {
        let o = PoincareOptions { floor: f.max(opts.floor), ..quiet };
        if let Ok(s) = solve(d, restricted, &o) {
            extension.push((f.max(opts.floor), s.value));
        }
    }
    (refinement, extension)
}

fn estimate(d: &GridDensity, restricted: bool, constraint: Constraint, opts: &PoincareOptions) -> Result<PoincareEstimate> {
    let s = solve(d, restricted, opts)?;
    let (mut refinement, extension) = if opts.traces { trace_values(d, restricted, opts) } else { (vec![], vec![]) };
    refinement.push((d.h(), s.value));
    let infinite = extension.len() == EXTENSION_FLOORS.len()
        && extension.windows(2).all(|w| w[1].1 > (1.0 + EXTENSION_GROWTH) * w[0].1);
    Ok(PoincareEstimate {
        value: if infinite { f64::INFINITY } else { s.value },
        extremal: GridFunction::new(d.x_min(), d.h(), s.extremal),
        constraint,
        rayleigh_residual: s.residual,
        iterations: s.iters,
        refinement_trace: refinement,
        extension_trace: extension,
        infinite,
    })
}

/// `R = sup E g²/E g'²` over `E g = 0`, i.e. the reciprocal of the
/// smallest nonzero eigenvalue of `−(p g')' = λ p g` with no-flux ends.
pub fn poincare_constant(d: &GridDensity) -> Result<PoincareEstimate> {
    poincare_constant_with(d, &PoincareOptions::default())
}

pub fn poincare_constant_with(d: &GridDensity, opts: &PoincareOptions) -> Result<PoincareEstimate> {
    estimate(d, false, Constraint::Full, opts)
}

/// `R* = sup E g²/E g'²` over `E g = 0` and `E g' = 0`.
pub fn restricted_poincare(d: &GridDensity) -> Result<PoincareEstimate> {
    restricted_poincare_with(d, &PoincareOptions::default())
}

pub fn restricted_poincare_with(d: &GridDensity, opts: &PoincareOptions) -> Result<PoincareEstimate> {
    estimate(d, true, Constraint::Restricted, opts)
}

/// Poincaré constant of the law conditioned on `|X| ≤ t`.
pub fn truncated_poincare(d: &GridDensity, t: f64) -> Result<PoincareEstimate> {
    let c = conditional_truncate(d, t)?;
    window_mass_check(d, t)?;
    estimate(&c, false, Constraint::Truncated { t }, &PoincareOptions::default())
}

fn window_mass_check(d: &GridDensity, t: f64) -> Result<f64> {
    let m = d.expect(|x| if x.abs() <= t { 1.0 } else { 0.0 });
    if m <= 1e-3 {
        return Err(Error::EmptyWindow(t));
    }
    Ok(m)
}

/// Tail-ratio statistic `sup_{0≤x≤t} ∫_x^t y p(y) dy / p(x)` and its mirror
/// `sup_{−t≤x≤0} ∫_{−t}^x (−y) p(y) dy / p(x)`; the larger is returned.
pub fn borovkov_utev_ratio(d: &GridDensity, t: f64) -> Result<f64> {
    let (r, l) = borovkov_utev_sides(d, t)?;
    Ok(r.max(l))
}

/// The right and left tail-ratio statistics.
pub fn borovkov_utev_sides(d: &GridDensity, t: f64) -> Result<(f64, f64)> {
    if !(t > 0.0) {
        return Err(Error::InvalidParams(format!("window half-width must be > 0, got {t}")));
    }
    window_mass_check(d, t)?;
    Ok((tail_ratio(d, t, 1.0)?, tail_ratio(d, t, -1.0)?))
}

/// One side of the statistic, accumulated by the trapezoid rule from the
/// window edge `sign·t` towards the origin.
fn tail_ratio(d: &GridDensity, t: f64, sign: f64) -> Result<f64> {
    let plain = d.plain_samples();
    let p = &plain.values;
    let h = d.h();
    let peak = p.iter().cloned().fold(0.0, f64::max);
    let mut nodes: Vec<usize> =
        (0..p.len()).filter(|&i| (0.0..=t * (1.0 + 1e-12) + 1e-9 * h).contains(&(sign * d.x(i)))).collect();
    if sign > 0.0 {
        nodes.reverse();
    }
    let Some(&first) = nodes.first() else {
        return Err(Error::EmptyWindow(t));
    };
    let edge = sign * t;
    let xe = d.x(first);
    let pe = if (xe - edge).abs() < 1e-9 * h {
        p[first]
    } else {
        let u = (edge - d.x_min()) / h;
        let i = (u.floor().max(0.0) as usize).min(p.len() - 2);
        let s = u - i as f64;
        p[i] * (1.0 - s) + p[i + 1] * s
    };
    let f = |x: f64, v: f64| sign * x * v;
    let mut acc = 0.5 * (xe - edge).abs() * (f(edge, pe) + f(xe, p[first]));
    let mut best: f64 = 0.0;
    for (k, &i) in nodes.iter().enumerate() {
        if k > 0 {
            let j = nodes[k - 1];
            acc += 0.5 * h * (f(d.x(j), p[j]) + f(d.x(i), p[i]));
        }
        if p[i] <= POINCARE_FLOOR * peak {
            return Err(Error::Undefined(format!("density below floor at x = {}", d.x(i))));
        }
        best = best.max(acc / p[i]);
    }
    Ok(best)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::family::{materialize, Family, GridSpec};

    fn mat(f: Family) -> GridDensity {
        materialize(&f.spec(), &GridSpec::default()).unwrap()
    }

    fn correlation(d: &GridDensity, g: &[f64], f: impl Fn(f64) -> f64) -> f64 {
        let fv: Vec<f64> = (0..d.len()).map(|i| f(d.x(i))).collect();
        let e = |v: &[f64]| d.expect_values(v);
        let (mg, mf) = (e(g), e(&fv));
        let gc: Vec<f64> = g.iter().map(|v| v - mg).collect();
        let fc: Vec<f64> = fv.iter().map(|v| v - mf).collect();
        let gf: Vec<f64> = gc.iter().zip(&fc).map(|(a, b)| a * b).collect();
        let gg: Vec<f64> = gc.iter().map(|a| a * a).collect();
        let ff: Vec<f64> = fc.iter().map(|a| a * a).collect();
        e(&gf) / (e(&gg) * e(&ff)).sqrt()
    }

    #[test]
    fn normal_constants() {
        let d = mat(Family::normal(0.0, 1.0));
        let full = poincare_constant(&d).unwrap();
        assert!((full.value - 1.0).abs() < 1e-3, "{}", full.value);
        let r = restricted_poincare(&d).unwrap();
        assert!((r.value - 0.5).abs() < 1e-3, "{}", r.value);
        assert!(correlation(&d, &r.extremal.values, |x| x * x - 1.0).abs() > 0.999);
        assert!(r.value <= full.value + 1e-8);
        assert!((r.rayleigh_of_extremal(&d) - r.value).abs() < 1e-10 * r.value);
        assert!((full.rayleigh_of_extremal(&d) - full.value).abs() < 1e-10 * full.value);
        assert!(d.expect_values(&r.extremal.values).abs() < 1e-8);
    }

    #[test]
    fn uniform_neumann_constant() {
        let s3 = 3f64.sqrt();
        let d = mat(Family::uniform(-s3, s3));
        let r = poincare_constant(&d).unwrap();
        let want = 12.0 / std::f64::consts::PI.powi(2);
        assert!((r.value - want).abs() < 1e-3, "{}", r.value);
    }

    #[test]
    fn normal_scaling_laws() {
        for v in [0.25, 4.0] {
            let d = mat(Family::normal(0.0, v));
            let r = restricted_poincare(&d).unwrap();
            assert!(((r.value - v / 2.0) / (v / 2.0)).abs() < 5e-3, "var={v} R*={}", r.value);
        }
        let d = mat(Family::normal(0.0, 4.0));
        assert!((poincare_constant(&d).unwrap().value - 4.0).abs() < 5e-3);
    }

    #[test]
    fn explicit_test_functions_stay_below() {
        let d = mat(Family::normal(0.0, 1.0));
        let full = poincare_constant(&d).unwrap().value;
        let g: Vec<f64> = (0..d.len()).map(|i| d.x(i).powi(3) - 3.0 * d.x(i)).collect();
        assert!(rayleigh_quotient(&d, &g) <= full + 1e-6);
    }

    #[test]
    fn truncated_examples() {
        let d = mat(Family::normal(0.0, 1.0));
        assert!((truncated_poincare(&d, 8.0).unwrap().value - 1.0).abs() < 2e-3);
        let s3 = 3f64.sqrt();
        let u = mat(Family::uniform(-s3, s3));
        let r = truncated_poincare(&u, 1.0).unwrap();
        let want = (2.0 / std::f64::consts::PI).powi(2);
        assert!((r.value - want).abs() < 1e-3, "{}", r.value);
        assert_eq!(r.constraint, Constraint::Truncated { t: 1.0 });
        let g = materialize(&Family::gamma(6.0).standardized(), &GridSpec::default()).unwrap();
        let vals: Vec<f64> = [2.0, 3.0, 4.0].iter().map(|t| truncated_poincare(&g, *t).unwrap().value).collect();
        assert!(vals.windows(2).all(|w| w[0] < w[1]), "{vals:?}");
    }

    #[test]
    fn exponential_constant_on_long_window() {
        let spec = Family::exponential(1.0).standardized();
        let d = materialize(&spec, &GridSpec::with_domain(-1.0, 140.0, 8192)).unwrap();
        let opts = PoincareOptions { floor: 1e-300, traces: false, ..Default::default() };
        let r = poincare_constant_with(&d, &opts).unwrap();
        assert!((r.value - 4.0).abs() < 1e-2, "{}", r.value);
    }

    #[test]
    fn tail_ratio_examples() {
        let s3 = 3f64.sqrt();
        let u = mat(Family::uniform(-s3, s3));
        let b = borovkov_utev_ratio(&u, s3).unwrap();
        assert!((b - 1.5).abs() < 1e-6, "{b}");
        let (r, l) = borovkov_utev_sides(&mat(Family::normal(0.0, 1.0)), 3.0).unwrap();
        assert!((r - l).abs() < 1e-8);
        let fine = materialize(&Family::normal(0.0, 1.0).spec(), &GridSpec::with_points(8192)).unwrap();
        let (rf, _) = borovkov_utev_sides(&fine, 3.0).unwrap();
        assert!(r > 0.0 && (r - rf).abs() < 1e-4, "{r} {rf}");
    }
}
