//! Additive projections of functions of sums, the projection inequality,
//! and the telescoping decomposition over partial sums.
//!
//! Each summand is treated as the discrete law carrying the trapezoid
//! masses of its grid. Sums of summands then live on lattices of the same
//! step, so every expectation below is an exact finite sum and the
//! algebraic identities (Pythagoras, telescoping) hold to rounding.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::convolution::{congruent, PROJECTION_FLOOR};
use crate::error::{Error, Result};
use crate::grid::{GridDensity, GridFunction};
use crate::info::{fisher_information, score, DEFAULT_FLOOR};
use crate::report::extended;
use crate::testfn::RealFn;

/// Largest `n` accepted by [`telescoping_decomposition`].
pub const MAX_TELESCOPING_N: usize = 8;
/// Largest number of summand nodes in the telescoping quadratures.
pub const MAX_TELESCOPING_NODES: usize = 1024;
/// Absolute tolerance on the asserted inequalities.
pub const CHECK_TOL: f64 = 1e-8;

/// Normalized masses of `d` restricted to its support, with the node range.
#[derive(Debug, Clone)]
struct Atoms {
    x0: f64,
    h: f64,
    /// First node of the support in the parent grid.
    lo: usize,
    q: Vec<f64>,
}

impl Atoms {
    fn of(d: &GridDensity) -> Result<Self> {
        let m = d.masses();
        let lo = m.iter().position(|v| *v > 0.0).ok_or(Error::DegenerateDensity)?;
        let hi = m.iter().rposition(|v| *v > 0.0).ok_or(Error::DegenerateDensity)?;
        let total: f64 = m[lo..=hi].iter().sum();
        Ok(Atoms { x0: d.x(lo), h: d.h(), lo, q: m[lo..=hi].iter().map(|v| v / total).collect() })
    }

    fn len(&self) -> usize {
        self.q.len()
    }

    fn x(&self, j: usize) -> f64 {
        self.x0 + self.h * j as f64
    }

    fn expect(&self, v: &[f64]) -> f64 {
        self.q.iter().zip(v).map(|(a, b)| a * b).sum()
    }
}

fn sample(f: &impl RealFn, x: f64) -> Result<f64> {
    f.value(x).ok_or_else(|| Error::Undefined(format!("x = {x}")))
}

fn sample_slope(f: &impl RealFn, x: f64) -> Result<f64> {
    f.slope(x).ok_or_else(|| Error::Undefined(format!("slope at x = {x}")))
}

/// `g₁(u) = E f(u+Y₂)`, `g₂(v) = E f(Y₁+v)` and the orthogonal remainder.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdditiveProjection {
    /// On the support nodes of `Y₁`, one node wider on each side.
    pub g1: GridFunction,
    pub g2: GridFunction,
    /// `−E g₂(Y₂) ρ₂(Y₂)`.
    pub mu: f64,
    /// `E (f − g₁ − g₂)²` under the product law.
    pub residual_norm_sq: f64,
    /// True when `f` had a nonzero mean that was subtracted.
    pub f_centered: bool,
    /// The subtracted mean.
    pub f_mean: f64,
    pub f_norm_sq: f64,
    pub g1_norm_sq: f64,
    pub g2_norm_sq: f64,
}

impl AdditiveProjection {
    /// Defect of the Pythagorean split `E f² = E g₁² + E g₂² + E r²`.
    pub fn pythagoras_gap(&self) -> f64 {
        (self.f_norm_sq - self.g1_norm_sq - self.g2_norm_sq - self.residual_norm_sq).abs()
    }
}

/// Shared lattice of a pair of summands: `f` is tabulated at the sums
/// `x₁(i) + x₂(j)`, which depend on `i + j` only.
struct PairLattice {
    a1: Atoms,
    a2: Atoms,
    /// Parent-grid ranges of `g₁`, `g₂`: the support widened by one node.
    r1: (usize, usize),
    r2: (usize, usize),
    d1: GridDensity,
    d2: GridDensity,
    /// `f(s_k)` for `k` from `k0`, with `s_k = x₁(0) + x₂(0) + k h`.
    k0: usize,
    f: Vec<f64>,
    f_mean: f64,
}

impl PairLattice {
    fn new(f: &impl RealFn, d1: &GridDensity, d2: &GridDensity) -> Result<Self> {
        let (d1, d2) = congruent(d1, d2)?;
        let (a1, a2) = (Atoms::of(&d1)?, Atoms::of(&d2)?);
        let widen = |a: &Atoms, n: usize| (a.lo.saturating_sub(1), (a.lo + a.len()).min(n - 1));
        let r1 = widen(&a1, d1.len());
        let r2 = widen(&a2, d2.len());
        let k0 = r1.0 + r2.0;
        let k1 = r1.1 + r2.1;
        let base = d1.x_min() + d2.x_min();
        let h = d1.h();
        let f: Vec<f64> = (k0..=k1).into_par_iter().map(|k| sample(f, base + h * k as f64)).collect::<Result<_>>()?;
        let mut lat = PairLattice { a1, a2, r1, r2, d1, d2, k0, f, f_mean: 0.0 };
        let mean = lat.a1.expect(&lat.smooth_over_2(lat.a1.lo, lat.a1.len()));
        lat.f.iter_mut().for_each(|v| *v -= mean);
        lat.f_mean = mean;
        Ok(lat)
    }

    fn at(&self, i: usize, j: usize) -> f64 {
        self.f[i + j - self.k0]
    }

    /// `E f(x₁(i) + Y₂)` for `count` parent nodes of `Y₁` from `start`.
    fn smooth_over_2(&self, start: usize, count: usize) -> Vec<f64> {
        (start..start + count)
            .into_par_iter()
            .map(|i| self.a2.q.iter().enumerate().map(|(j, q)| q * self.at(i, self.a2.lo + j)).sum())
            .collect()
    }

    fn smooth_over_1(&self, start: usize, count: usize) -> Vec<f64> {
        (start..start + count)
            .into_par_iter()
            .map(|j| self.a1.q.iter().enumerate().map(|(i, q)| q * self.at(self.a1.lo + i, j)).sum())
            .collect()
    }

    fn g1(&self) -> GridFunction {
        let (a, b) = self.r1;
        GridFunction::new(self.d1.x(a), self.d1.h(), self.smooth_over_2(a, b - a + 1))
    }

    fn g2(&self) -> GridFunction {
        let (a, b) = self.r2;
        GridFunction::new(self.d2.x(a), self.d2.h(), self.smooth_over_1(a, b - a + 1))
    }

    /// `E (f − u(Y₁) − v(Y₂))²` with `u`, `v` given on the atoms.
    fn product_norm(&self, u: &[f64], v: &[f64]) -> f64 {
        let (l1, l2) = (self.a1.lo, self.a2.lo);
        (0..self.a1.len())
            .into_par_iter()
            .map(|i| {
                let row: f64 = self
                    .a2
                    .q
                    .iter()
                    .enumerate()
                    .map(|(j, q)| {
                        let r = self.at(l1 + i, l2 + j) - u[i] - v[j];
                        q * r * r
                    })
                    .sum();
                self.a1.q[i] * row
            })
            .collect::<Vec<f64>>()
            .iter()
            .sum()
    }
}

/// Values of a function given on a widened range at the atoms.
fn on_atoms(g: &GridFunction, range_start: usize, atoms: &Atoms) -> Vec<f64> {
    let off = atoms.lo - range_start;
    g.values[off..off + atoms.len()].to_vec()
}

fn eval_on_atoms(h: &impl RealFn, atoms: &Atoms) -> Result<Vec<f64>> {
    (0..atoms.len()).map(|j| sample(h, atoms.x(j))).collect()
}

/// Masked score of `d` on its atoms, zero outside the mask.
fn atom_score(d: &GridDensity, atoms: &Atoms) -> Result<Vec<f64>> {
    let s = score(d, PROJECTION_FLOOR)?;
    Ok((0..atoms.len()).map(|j| s.value(atoms.lo + j).unwrap_or(0.0)).collect())
}

fn projection_from(lat: &PairLattice) -> Result<AdditiveProjection> {
    let g1 = lat.g1();
    let g2 = lat.g2();
    let u = on_atoms(&g1, lat.r1.0, &lat.a1);
    let v = on_atoms(&g2, lat.r2.0, &lat.a2);
    let rho2 = atom_score(&lat.d2, &lat.a2)?;
    let mu = -lat.a2.q.iter().zip(&v).zip(&rho2).map(|((q, g), r)| q * g * r).sum::<f64>();
    let zero1 = vec![0.0; u.len()];
    let zero2 = vec![0.0; v.len()];
    let sq = |w: &[f64]| w.iter().map(|x| x * x).collect::<Vec<f64>>();
    Ok(AdditiveProjection {
        residual_norm_sq: lat.product_norm(&u, &v),
        f_norm_sq: lat.product_norm(&zero1, &zero2),
        g1_norm_sq: lat.a1.expect(&sq(&u)),
        g2_norm_sq: lat.a2.expect(&sq(&v)),
        f_centered: lat.f_mean != 0.0,
        f_mean: lat.f_mean,
        mu,
        g1,
        g2,
    })
}

/// Best additive approximation `g₁(Y₁) + g₂(Y₂)` of `f(Y₁+Y₂)` after
/// recentring `f`. Steps of `d1`, `d2` must agree or the coarser one is
/// resampled.
pub fn additive_projection(f: &impl RealFn, d1: &GridDensity, d2: &GridDensity) -> Result<AdditiveProjection> {
    projection_from(&PairLattice::new(f, d1, d2)?)
}

/// `E (f − h₁ − h₂)·u(Y₁)` under the product law, for orthogonality checks.
pub fn residual_moment(
    f: &impl RealFn,
    d1: &GridDensity,
    d2: &GridDensity,
    proj: &AdditiveProjection,
    u: impl Fn(f64) -> f64 + Sync,
) -> Result<f64> {
    let lat = PairLattice::new(f, d1, d2)?;
    let g = on_atoms(&proj.g1, lat.r1.0, &lat.a1);
    let e = on_atoms(&proj.g2, lat.r2.0, &lat.a2);
    let inner = lat.smooth_over_2(lat.a1.lo, lat.a1.len());
    let eg2 = lat.a2.expect(&e);
    Ok((0..lat.a1.len()).map(|i| lat.a1.q[i] * u(lat.a1.x(i)) * (inner[i] - g[i] - eg2)).sum())
}

/// Deviations in the derivative identity `g₁′(u) = −E f(u+Y₂)ρ₂(Y₂)` and
/// in `r₁(u) = −(g₁′(u) − μ)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DerivativeIdentity {
    /// Masked sup of `|g₁′(u) + E f(u+Y₂)ρ₂(Y₂)|`.
    pub deviation: f64,
    /// Masked sup of `|r₁(u) + g₁′(u) − μ|`.
    pub r1_deviation: f64,
    /// `−E f(u+Y₂)ρ₂(Y₂)` on the nodes of `g₁`.
    pub identity_slope: GridFunction,
    pub mask_nodes: usize,
}

/// Compares the difference quotient of `g₁` with the score form of its
/// derivative, on the nodes where `p₁` exceeds `1e−12` of its peak.
pub fn derivative_identity_check(f: &impl RealFn, d1: &GridDensity, d2: &GridDensity) -> Result<DerivativeIdentity> {
    let lat = PairLattice::new(f, d1, d2)?;
    let proj = projection_from(&lat)?;
    let slope = proj.g1.derivative();
    let rho2 = atom_score(&lat.d2, &lat.a2)?;
    let e_rho = lat.a2.expect(&rho2);
    let (a, b) = lat.r1;
    let id: Vec<f64> = (a..=b)
        .into_par_iter()
        .map(|i| -(0..lat.a2.len()).map(|j| lat.a2.q[j] * lat.at(i, lat.a2.lo + j) * rho2[j]).sum::<f64>())
        .collect();
    let cut = DEFAULT_FLOOR * lat.d1.max_value();
    let p1 = lat.d1.values();
    let (mut dev, mut r1_dev, mut count) = (0.0_f64, 0.0_f64, 0);
    for i in a + 1..b {
        if p1[i] <= cut {
            continue;
        }
        let k = i - a;
        let g1p = slope.values[k];
        dev = dev.max((g1p - id[k]).abs());
        // r₁(u) = E[(f(u+Y₂) − g₁(u) − g₂(Y₂)) ρ₂(Y₂)]
        let r1 = -id[k] - proj.g1.values[k] * e_rho + proj.mu;
        r1_dev = r1_dev.max((r1 + g1p - proj.mu).abs());
        count += 1;
    }
    Ok(DerivativeIdentity {
        deviation: dev,
        r1_deviation: r1_dev,
        identity_slope: GridFunction::new(proj.g1.x_min, proj.g1.h, id),
        mask_nodes: count,
    })
}

/// Both sides of the projection inequality at one `β`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PropMainReport {
    pub beta: f64,
    pub lhs: f64,
    #[serde(with = "extended")]
    pub rhs: f64,
    #[serde(with = "extended")]
    pub slack: f64,
    /// `E h₁(Y₁)`, `E h₂(Y₂)`, removed before evaluation.
    pub h_means: (f64, f64),
    /// `E (g₁ − h₁)²`, `E (g₂ − h₂)²`.
    pub g_terms: (f64, f64),
    /// `E (g₁′ − μ)²`, `E (g₂′ − μ)²`.
    pub derivative_terms: (f64, f64),
    #[serde(with = "extended")]
    pub i_bar: f64,
    pub mu: f64,
    pub residual_norm_sq: f64,
    /// Infinite Fisher information makes the bound empty.
    pub vacuous: bool,
    pub holds: bool,
}

/// `E (f − h₁ − h₂)² ≥ E(g₁−h₁)² + E(g₂−h₂)² + Ī⁻¹[β E(g₁′−μ)² + (1−β) E(g₂′−μ)²]`
/// with `Ī = (1−β) I(Y₁) + β I(Y₂)`.
///
/// `h₁`, `h₂` are centred first: the split of the left side into the
/// `g` terms and the residual needs `E h₁(Y₁) E h₂(Y₂) = 0`.
pub fn prop_main_check(
    f: &impl RealFn,
    d1: &GridDensity,
    d2: &GridDensity,
    h1: &impl RealFn,
    h2: &impl RealFn,
    beta: f64,
) -> Result<PropMainReport> {
    if !(0.0..=1.0).contains(&beta) {
        return Err(Error::InvalidParams(format!("beta must lie in [0, 1], got {beta}")));
    }
    let lat = PairLattice::new(f, d1, d2)?;
    let proj = projection_from(&lat)?;
    let mut u1 = eval_on_atoms(h1, &lat.a1)?;
    let mut u2 = eval_on_atoms(h2, &lat.a2)?;
    let h_means = (lat.a1.expect(&u1), lat.a2.expect(&u2));
    u1.iter_mut().for_each(|v| *v -= h_means.0);
    u2.iter_mut().for_each(|v| *v -= h_means.1);
    let lhs = lat.product_norm(&u1, &u2);
    let g1 = on_atoms(&proj.g1, lat.r1.0, &lat.a1);
    let g2 = on_atoms(&proj.g2, lat.r2.0, &lat.a2);
    let dist = |g: &[f64], h: &[f64], a: &Atoms| {
        let sq: Vec<f64> = g.iter().zip(h).map(|(x, y)| (x - y) * (x - y)).collect();
        a.expect(&sq)
    };
    let g_terms = (dist(&g1, &u1, &lat.a1), dist(&g2, &u2, &lat.a2));
    let mu = proj.mu;
    let dev = |g: &GridFunction, start: usize, a: &Atoms| {
        let s = on_atoms(&g.derivative(), start, a);
        let sq: Vec<f64> = s.iter().map(|x| (x - mu) * (x - mu)).collect();
        a.expect(&sq)
    };
    let derivative_terms = (dev(&proj.g1, lat.r1.0, &lat.a1), dev(&proj.g2, lat.r2.0, &lat.a2));
    let i1 = fisher_information(&lat.d1).value;
    let i2 = fisher_information(&lat.d2).value;
    let i_bar = (1.0 - beta) * i1 + beta * i2;
    let vacuous = !i_bar.is_finite();
    let penalty = if vacuous {
        0.0
    } else {
        (beta * derivative_terms.0 + (1.0 - beta) * derivative_terms.1) / i_bar
    };
    let rhs = g_terms.0 + g_terms.1 + penalty;
    let slack = lhs - rhs;
    Ok(PropMainReport {
        beta,
        lhs,
        rhs,
        slack,
        h_means,
        g_terms,
        derivative_terms,
        i_bar,
        mu,
        residual_norm_sq: proj.residual_norm_sq,
        vacuous,
        holds: vacuous || slack >= -CHECK_TOL,
    })
}

/// Successive projections of `f(U_n)` onto partially additive spaces.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TelescopingReport {
    pub n: usize,
    /// `f_1, …, f_n` as functions of `(X₁+…+X_m)/√n`.
    pub f_seq: Vec<GridFunction>,
    /// `g(u) = √n E f((X₁+…+X_{n−1}+u)/√n)`.
    pub g: GridFunction,
    /// `t_1, …, t_n`.
    pub t: Vec<f64>,
    /// `s_1, …, s_n`, each computed directly from its definition.
    pub s: Vec<f64>,
    /// `E f′(U_n)`.
    pub mu: f64,
    /// `E (g′(X) − μ)²`.
    pub derivative_term: f64,
    pub fisher: f64,
    /// `(i−1)/(n I) E(g′−μ)²` for each `i`.
    pub t_bounds: Vec<f64>,
    /// `(n−1)/(2I) E(g′−μ)²`.
    pub lower_bound_lhs: f64,
    /// `max |s_m − s_{m−1} − t_m|`.
    pub recursion_error: f64,
    pub f_centered: bool,
    pub nodes: usize,
}

impl TelescopingReport {
    pub fn t_bounds_hold(&self) -> bool {
        self.t.iter().zip(&self.t_bounds).all(|(t, b)| *t >= b - CHECK_TOL) && self.t.iter().all(|t| *t >= -CHECK_TOL)
    }

    pub fn sum_gap(&self) -> f64 {
        (self.s[self.n - 1] - self.t.iter().sum::<f64>()).abs()
    }

    pub fn eq8_holds(&self) -> bool {
        self.s[self.n - 1] >= self.lower_bound_lhs - CHECK_TOL
    }
}

/// Coarsens `d` by an integer step until at most `max` nodes carry mass.
fn coarsen(d: &GridDensity, max: usize) -> Result<GridDensity> {
    let a = Atoms::of(d)?;
    let step = a.len().div_ceil(max).max(1);
    if step == 1 {
        return Ok(d.clone());
    }
    d.subsample(step, a.lo % step)
}

/// Discrete convolution of mass vectors.
fn convolve_masses(a: &[f64], b: &[f64]) -> Vec<f64> {
    let n = a.len() + b.len() - 1;
    (0..n)
        .into_par_iter()
        .map(|k| {
            let lo = k.saturating_sub(b.len() - 1);
            let hi = k.min(a.len() - 1);
            (lo..=hi).map(|i| a[i] * b[k - i]).sum()
        })
        .collect()
}

/// Builds `f_m`, `g`, `t_i` and `s_m` for `n` copies of the standardized
/// `d`, coarsened to at most 1024 support nodes.
///
/// With `X` on the lattice `x₀ + jh`, the partial sum `X₁+…+X_m` sits on
/// `m x₀ + kh`, and `f_m(k) = Σ_j q_j f_{m+1}(k + j)` exactly.
pub fn telescoping_decomposition(f: &impl RealFn, d: &GridDensity, n: usize) -> Result<TelescopingReport> {
    if n == 0 || n > MAX_TELESCOPING_N {
        return Err(Error::Budget(n));
    }
    if (d.mean().abs() > 1e-6) || (d.variance() - 1.0).abs() > 1e-6 {
        return Err(Error::InvalidParams(format!(
            "telescoping needs a standardized density (mean {}, variance {})",
            d.mean(),
            d.variance()
        )));
    }
    let d = coarsen(d, MAX_TELESCOPING_NODES)?;
    let fisher = fisher_information(&d).value;
    if !fisher.is_finite() {
        return Err(Error::InfiniteFisher);
    }
    let at = Atoms::of(&d)?;
    let (l, h, x0) = (at.len(), at.h, at.x0);
    let rn = (n as f64).sqrt();
    let node = |m: usize, k: usize| (m as f64 * x0 + h * k as f64) / rn;
    // partial-sum laws P_0 … P_n
    let mut laws = vec![vec![1.0]];
    for m in 1..=n {
        let next = convolve_masses(&laws[m - 1], &at.q);
        laws.push(next);
    }
    let top = n * (l - 1) + 1;
    let mut f_n: Vec<f64> = (0..top).into_par_iter().map(|k| sample(f, node(n, k))).collect::<Result<_>>()?;
    let f_slope: Vec<f64> = (0..top).into_par_iter().map(|k| sample_slope(f, node(n, k))).collect::<Result<_>>()?;
    let mean: f64 = laws[n].iter().zip(&f_n).map(|(p, v)| p * v).sum();
    f_n.iter_mut().for_each(|v| *v -= mean);
    let mu: f64 = laws[n].iter().zip(&f_slope).map(|(p, v)| p * v).sum();
    // f_seq[m] = F_m on m(l−1)+1 nodes
    let mut fs: Vec<Vec<f64>> = vec![Vec::new(); n + 1];
    fs[n] = f_n;
    for m in (0..n).rev() {
        let up = &fs[m + 1];
        let len = m * (l - 1) + 1;
        fs[m] = (0..len).into_par_iter().map(|k| at.q.iter().enumerate().map(|(j, q)| q * up[k + j]).sum()).collect();
    }
    let g: Vec<f64> = fs[1].iter().map(|v| rn * v).collect();
    // g′(u) = E f′((X₁+…+X_{n−1}+u)/√n)
    let below = &laws[n - 1];
    let g_slope: Vec<f64> = (0..l)
        .into_par_iter()
        .map(|j| below.iter().enumerate().map(|(k, p)| p * f_slope[k + j]).sum())
        .collect();
    let dev: Vec<f64> = g_slope.iter().map(|v| (v - mu) * (v - mu)).collect();
    let derivative_term = at.expect(&dev);
    let eg = at.expect(&g);
    let eg2 = at.expect(&g.iter().map(|v| v * v).collect::<Vec<f64>>());
    let rq = 1.0 / rn;
    // t_i = E (F_i(A+X) − F_{i−1}(A) − g(X)/√n)² with A ~ P_{i−1}
    let t: Vec<f64> = (1..=n)
        .map(|i| {
            let (fi, fp, law) = (&fs[i], &fs[i - 1], &laws[i - 1]);
            (0..law.len())
                .into_par_iter()
                .map(|k| {
                    let row: f64 = (0..l)
                        .map(|j| {
                            let r = fi[k + j] - fp[k] - rq * g[j];
                            at.q[j] * r * r
                        })
                        .sum();
                    law[k] * row
                })
                .collect::<Vec<f64>>()
                .iter()
                .sum()
        })
        .collect();
    // s_m = E F_m² − (2m/√n) E[g(X) F_m(X + A_{m−1})] + (m E g² + m(m−1)(E g)²)/n
    let s: Vec<f64> = (1..=n)
        .map(|m| {
            let (fm, law) = (&fs[m], &laws[m]);
            let efm2: f64 = law.iter().zip(fm).map(|(p, v)| p * v * v).sum();
            let lower = &laws[m - 1];
            let cross: f64 = (0..lower.len())
                .into_par_iter()
                .map(|k| lower[k] * (0..l).map(|j| at.q[j] * g[j] * fm[k + j]).sum::<f64>())
                .collect::<Vec<f64>>()
                .iter()
                .sum();
            let mf = m as f64;
            efm2 - 2.0 * mf * rq * cross + (mf * eg2 + mf * (mf - 1.0) * eg * eg) / n as f64
        })
        .collect();
    let mut recursion_error: f64 = 0.0;
    let mut prev = 0.0;
    for m in 0..n {
        recursion_error = recursion_error.max((s[m] - prev - t[m]).abs());
        prev = s[m];
    }
    let nf = n as f64;
    let t_bounds: Vec<f64> = (1..=n).map(|i| (i as f64 - 1.0) / (nf * fisher) * derivative_term).collect();
    let f_seq = (1..=n)
        .map(|m| GridFunction::new(m as f64 * x0 / rn, h / rn, std::mem::take(&mut fs[m])))
        .collect();
    Ok(TelescopingReport {
        n,
        f_seq,
        g: GridFunction::new(x0, h, g),
        t,
        s,
        mu,
        derivative_term,
        fisher,
        t_bounds,
        lower_bound_lhs: (nf - 1.0) / (2.0 * fisher) * derivative_term,
        recursion_error,
        f_centered: mean != 0.0,
        nodes: l,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::family::{materialize, Family, GridSpec};
    use crate::testfn::{FnPair, TestFunction};

    fn std_mat(f: Family) -> GridDensity {
        materialize(&f.standardized(), &GridSpec::default()).unwrap()
    }

    #[test]
    fn linear_is_additive() {
        let d = std_mat(Family::gamma(5.0));
        let p = additive_projection(&TestFunction::Linear { slope: 1.0 }, &d, &d).unwrap();
        assert!(p.residual_norm_sq < 1e-8);
        for (k, v) in p.g1.values.iter().enumerate() {
            assert!((v - p.g1.x(k)).abs() < 1e-8);
        }
    }

    #[test]
    fn hermite_on_normals() {
        let d = std_mat(Family::normal(0.0, 1.0));
        let f = TestFunction::Hermite2 { c: 2.0 };
        let p = additive_projection(&f, &d, &d).unwrap();
        assert!((p.residual_norm_sq - 4.0).abs() < 1e-4, "{}", p.residual_norm_sq);
        let k = p.g1.values.len() / 2;
        let u = p.g1.x(k);
        assert!((p.g1.values[k] - (u * u - 1.0)).abs() < 1e-6);
        let c = derivative_identity_check(&f, &d, &d).unwrap();
        assert!(c.deviation < 1e-4, "{}", c.deviation);
        assert!(c.r1_deviation < 1e-4, "{}", c.r1_deviation);
    }

    #[test]
    fn pythagoras_for_sine_on_mixture() {
        let d = std_mat(Family::two_bump());
        let f = FnPair(f64::sin, f64::cos);
        let p = additive_projection(&f, &d, &d).unwrap();
        assert!(p.pythagoras_gap() < 1e-5);
        assert!(residual_moment(&f, &d, &d, &p, |x| x).unwrap().abs() < 1e-10);
    }

    #[test]
    fn prop_main_linear_saturates() {
        let d = std_mat(Family::two_bump());
        let f = TestFunction::Linear { slope: 1.0 };
        let r = prop_main_check(&f, &d, &d, &TestFunction::Linear { slope: 0.3 }, &TestFunction::Linear { slope: 0.0 }, 0.5)
            .unwrap();
        assert!(r.holds, "{r:?}");
        assert!(r.derivative_terms.0 < 1e-6 && r.derivative_terms.1 < 1e-6, "{:?}", r.derivative_terms);
    }

    #[test]
    fn telescoping_linear_is_zero() {
        let d = std_mat(Family::two_bump());
        let r = telescoping_decomposition(&TestFunction::Linear { slope: 1.0 }, &d, 4).unwrap();
        assert!(r.t.iter().all(|t| t.abs() < 1e-10), "{:?}", r.t);
        assert!(r.derivative_term < 1e-10);
        assert!(r.recursion_error < 1e-10);
    }

    #[test]
    fn telescoping_hermite_normal_is_tight() {
        let d = std_mat(Family::normal(0.0, 1.0));
        let r = telescoping_decomposition(&TestFunction::Hermite2 { c: 1.0 }, &d, 2).unwrap();
        assert!((r.t[1] - 1.0).abs() < 1e-6, "{:?}", r.t);
        assert!((r.derivative_term - 2.0).abs() < 1e-6);
        assert!(r.mu.abs() < 1e-9);
        assert!(r.t_bounds_hold() && r.eq8_holds(), "{r:?}");
    }

    #[test]
    fn telescoping_rejects_large_n() {
        let d = std_mat(Family::normal(0.0, 1.0));
        assert!(matches!(telescoping_decomposition(&TestFunction::Linear { slope: 1.0 }, &d, 9), Err(Error::Budget(9))));
    }
}
