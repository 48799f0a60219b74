//! End-to-end checks of the convergence bounds over families and sums.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::convolution::{double, fisher_drop, standardized_sums, sum_score_projection};
use crate::density::{moments, skewness, standardize};
use crate::error::{Error, Result};
use crate::family::{materialize, DistributionSpec, Family, GridSpec};
use crate::grid::{GridDensity, GridFunction};
use crate::info::{distance_chain_with_j, relative_entropy, standardized_fisher, tail_score_mass, DistanceChain};
use crate::poincare::{poincare_constant, restricted_poincare, PoincareEstimate};
use crate::projection::additive_projection;
use crate::report::{csv_table, extended, fmt_real};

/// Slack allowed on every asserted inequality.
pub const SLACK_TOL: f64 = 1e-6;
/// Slack on the intermediate inequality of the two-fold bound.
pub const INTERMEDIATE_TOL: f64 = 1e-4;
/// Relative agreement of `J(U₂)` with `J(Y₁) − drop`.
pub const CROSS_TOL: f64 = 1e-3;
pub const DEFAULT_N_SET: [u32; 7] = [1, 2, 4, 8, 16, 32, 64];
pub const DEFAULT_RADII: [f64; 6] = [0.0, 0.5, 1.0, 2.0, 3.0, 4.0];
/// Absolute noise level below which differences of `J` count as zero.
const FLAT_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Pass,
    Fail,
    /// A hypothesis of the bound is infinite, so the bound says nothing.
    Vacuous,
}

impl Status {
    pub fn as_str(self) -> &'static str {
        match self {
            Status::Pass => "pass",
            Status::Fail => "fail",
            Status::Vacuous => "vacuous",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Constants {
    #[serde(rename = "R", with = "extended")]
    pub r: f64,
    #[serde(rename = "R_star", with = "extended")]
    pub r_star: f64,
    pub sigma2: f64,
    #[serde(rename = "J_X", with = "extended")]
    pub j_x: f64,
    #[serde(rename = "D_X", with = "extended")]
    pub d_x: f64,
    pub skewness_s: f64,
}

impl Constants {
    pub fn of(d: &GridDensity) -> Result<Self> {
        let r = finite_or_inf(poincare_constant(d)?);
        let r_star = finite_or_inf(restricted_poincare(d)?);
        Ok(Constants {
            r,
            r_star,
            sigma2: d.variance(),
            j_x: standardized_fisher(d),
            d_x: relative_entropy(d),
            skewness_s: skewness(d),
        })
    }

    /// `2R* ≥ σ²`, under which the sharp bound is below the plain one.
    pub fn ordering_holds(&self) -> bool {
        2.0 * self.r_star >= self.sigma2
    }

    pub fn j_vacuous(&self) -> bool {
        !self.j_x.is_finite() || !self.r_star.is_finite()
    }

    pub fn d_vacuous(&self) -> bool {
        !self.d_x.is_finite() || !self.r.is_finite()
    }

    /// `2R* J(X) / (nσ²)`.
    pub fn bound_j_thm(&self, n: u32) -> f64 {
        scaled(2.0 * self.r_star, self.j_x) / (n as f64 * self.sigma2)
    }

    /// `2R* J(X) / (2R* + (n−1)σ²)`.
    pub fn bound_j_sharp(&self, n: u32) -> f64 {
        scaled(2.0 * self.r_star, self.j_x) / (2.0 * self.r_star + (n as f64 - 1.0) * self.sigma2)
    }

    /// `2R D(X) / (nσ²)`.
    pub fn bound_d(&self, n: u32) -> f64 {
        scaled(2.0 * self.r, self.d_x) / (n as f64 * self.sigma2)
    }
}

fn finite_or_inf(e: PoincareEstimate) -> f64 {
    if e.infinite {
        f64::INFINITY
    } else {
        e.value
    }
}

/// `a·b` with `0·∞ = 0`.
fn scaled(a: f64, b: f64) -> f64 {
    if a == 0.0 || b == 0.0 {
        0.0
    } else {
        a * b
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RowFlags {
    pub vacuous: bool,
    pub j_le_sharp: bool,
    pub j_le_thm: bool,
    pub sharp_le_thm: bool,
    /// Whether `sharp_le_thm` is asserted (`2R* ≥ σ²`) or only reported.
    pub ordering_asserted: bool,
    pub d_vacuous: bool,
    pub d_le_bound: bool,
    pub chain_ok: bool,
    pub skew_ok: bool,
}

impl RowFlags {
    pub fn status(&self) -> Status {
        if self.vacuous {
            return Status::Vacuous;
        }
        let ordering = !self.ordering_asserted || self.sharp_le_thm;
        let d = self.d_vacuous || self.d_le_bound;
        if self.j_le_sharp && self.j_le_thm && ordering && d && self.chain_ok && self.skew_ok {
            Status::Pass
        } else {
            Status::Fail
        }
    }

    /// Names of the asserted checks that failed.
    pub fn failures(&self) -> Vec<&'static str> {
        let mut out = Vec::new();
        if !self.vacuous {
            if !self.j_le_sharp {
                out.push("j_le_sharp");
            }
            if !self.j_le_thm {
                out.push("j_le_thm");
            }
            if self.ordering_asserted && !self.sharp_le_thm {
                out.push("sharp_le_thm");
            }
        }
        if !self.d_vacuous && !self.d_le_bound {
            out.push("d_le_bound");
        }
        if !self.chain_ok {
            out.push("chain");
        }
        if !self.skew_ok {
            out.push("skew_floor");
        }
        out
    }

    /// `pass`, `vacuous`, or `fail:` followed by the failed checks.
    pub fn label(&self) -> String {
        match self.status() {
            Status::Fail => format!("fail:{}", self.failures().join("|")),
            s => s.as_str().to_string(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub n: u32,
    #[serde(rename = "J", with = "extended")]
    pub j: f64,
    #[serde(rename = "D", with = "extended")]
    pub d: f64,
    #[serde(rename = "bound_J_thm", with = "extended")]
    pub bound_j_thm: f64,
    #[serde(rename = "bound_J_sharp", with = "extended")]
    pub bound_j_sharp: f64,
    #[serde(rename = "bound_D", with = "extended")]
    pub bound_d: f64,
    pub skew_floor: f64,
    #[serde(rename = "nJ", with = "extended")]
    pub nj: f64,
    pub distances: DistanceChain,
    #[serde(with = "extended")]
    pub slack_thm: f64,
    #[serde(with = "extended")]
    pub slack_sharp: f64,
    #[serde(with = "extended")]
    pub slack_d: f64,
    pub flags: RowFlags,
    pub status: Status,
}

impl SweepRow {
    fn new(n: u32, u: &GridDensity, c: &Constants) -> Self {
        let j = standardized_fisher(u);
        let d = relative_entropy(u);
        let m2 = u.variance();
        let skew_floor = moments(u, 3).powi(2) / (m2 * moments(u, 4));
        let mut row = SweepRow {
            n,
            j,
            d,
            bound_j_thm: c.bound_j_thm(n),
            bound_j_sharp: c.bound_j_sharp(n),
            bound_d: c.bound_d(n),
            skew_floor,
            nj: n as f64 * j,
            distances: distance_chain_with_j(u, j),
            slack_thm: 0.0,
            slack_sharp: 0.0,
            slack_d: 0.0,
            flags: RowFlags {
                vacuous: true,
                j_le_sharp: false,
                j_le_thm: false,
                sharp_le_thm: false,
                ordering_asserted: false,
                d_vacuous: true,
                d_le_bound: false,
                chain_ok: false,
                skew_ok: false,
            },
            status: Status::Vacuous,
        };
        row.slack_thm = row.bound_j_thm - j;
        row.slack_sharp = row.bound_j_sharp - j;
        row.slack_d = row.bound_d - d;
        row.flags = row.recompute_flags(c);
        row.status = row.flags.status();
        row
    }

    /// Flags from the numeric fields of the row and the constants.
    pub fn recompute_flags(&self, c: &Constants) -> RowFlags {
        let le = |a: f64, b: f64| a <= b + SLACK_TOL || (a.is_infinite() && b.is_infinite());
        RowFlags {
            vacuous: c.j_vacuous(),
            j_le_sharp: le(self.j, self.bound_j_sharp),
            j_le_thm: le(self.j, self.bound_j_thm),
            sharp_le_thm: le(self.bound_j_sharp, self.bound_j_thm),
            ordering_asserted: c.ordering_holds(),
            d_vacuous: c.d_vacuous(),
            d_le_bound: le(self.d, self.bound_d),
            chain_ok: !self.j.is_finite() || self.distances.holds(),
            skew_ok: !self.j.is_finite() || self.j >= self.skew_floor - SLACK_TOL,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepReport {
    pub family: DistributionSpec,
    pub grid: GridSpec,
    pub rows: Vec<SweepRow>,
    pub constants: Constants,
}

impl SweepReport {
    pub fn status(&self) -> Status {
        if self.rows.iter().any(|r| r.status == Status::Fail) {
            Status::Fail
        } else if self.rows.iter().all(|r| r.status == Status::Vacuous) {
            Status::Vacuous
        } else {
            Status::Pass
        }
    }

    pub fn to_csv(&self) -> String {
        let header = [
            "n",
            "J",
            "bound_J_sharp",
            "bound_J_thm",
            "D",
            "bound_D",
            "skew_floor",
            "nJ",
            "sup_diff",
            "tv",
            "hellinger",
            "flags",
        ];
        let rows: Vec<Vec<String>> = self
            .rows
            .iter()
            .map(|r| {
                vec![
                    r.n.to_string(),
                    fmt_real(r.j),
                    fmt_real(r.bound_j_sharp),
                    fmt_real(r.bound_j_thm),
                    fmt_real(r.d),
                    fmt_real(r.bound_d),
                    fmt_real(r.skew_floor),
                    fmt_real(r.nj),
                    fmt_real(r.distances.sup_diff),
                    fmt_real(r.distances.tv),
                    fmt_real(r.distances.hellinger),
                    r.flags.label(),
                ]
            })
            .collect();
        csv_table(&header, &rows)
    }
}

fn check_n_set(n_set: &[u32]) -> Result<()> {
    if n_set.is_empty() || n_set[0] == 0 || n_set.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::InvalidParams("n values must be strictly increasing positive integers".into()));
    }
    Ok(())
}

/// Bounds on `J(Uₙ)` and `D(Uₙ)` for each `n`, with constants of `X`.
pub fn verify_o1n(spec: &DistributionSpec, n_set: &[u32], grid: &GridSpec) -> Result<SweepReport> {
    check_n_set(n_set)?;
    let d = materialize(spec, grid)?;
    let (constants, sums) = rayon::join(|| Constants::of(&d), || standardized_sums(&d, n_set));
    let (constants, sums) = (constants?, sums?);
    let rows = n_set
        .par_iter()
        .map(|n| SweepRow::new(*n, &sums.entries[n], &constants))
        .collect();
    Ok(SweepReport { family: spec.clone(), grid: *grid, rows, constants })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TwoFoldReport {
    #[serde(rename = "J1", with = "extended")]
    pub j1: f64,
    #[serde(rename = "J2", with = "extended")]
    pub j2: f64,
    #[serde(rename = "R_star", with = "extended")]
    pub r_star: f64,
    /// `J₁ · 2R*/(1 + 2R*)` for the standardized law.
    #[serde(with = "extended")]
    pub bound: f64,
    #[serde(with = "extended")]
    pub slack: f64,
    pub vacuous: bool,
    pub holds: bool,
    /// `E(g(Y) + Y)²` with `(g(Y₁) + g(Y₂))/√2` the additive part of the
    /// score of the normalized pair.
    pub intermediate_lhs: f64,
    /// `J′²/J`.
    pub intermediate_rhs: f64,
    pub intermediate_holds: bool,
    /// `I(Y₁) − I((Y₁+Y₂)/√2)` through the projected score.
    pub drop: f64,
    /// `|J₁ − drop − J₂| / max(J₂, 1e−8)`.
    pub cross_gap: f64,
    pub cross_ok: bool,
}

impl TwoFoldReport {
    pub fn status(&self) -> Status {
        if self.vacuous {
            Status::Vacuous
        } else if self.holds && self.intermediate_holds && self.cross_ok {
            Status::Pass
        } else {
            Status::Fail
        }
    }
}

/// One doubling step `J((Y₁+Y₂)/√2) ≤ J(Y₁)·2R*/(σ²+2R*)` on the
/// standardized law, with the intermediate inequality of its derivation
/// and a cross-check of `J₂` against the Fisher drop.
pub fn verify_two_fold(spec: &DistributionSpec, grid: &GridSpec) -> Result<TwoFoldReport> {
    let s = standardize(&materialize(spec, grid)?)?;
    let j1 = standardized_fisher(&s);
    let r_star = finite_or_inf(restricted_poincare(&s)?);
    let vacuous = !j1.is_finite() || !r_star.is_finite();
    let pair = double(&s)?;
    let j2 = standardized_fisher(&pair);
    let bound = scaled(2.0 * r_star, j1) / (1.0 + 2.0 * r_star);
    let slack = bound - j2;
    let holds = j2 <= bound + SLACK_TOL;
    if vacuous {
        return Ok(TwoFoldReport {
            j1,
            j2,
            r_star,
            bound,
            slack,
            vacuous,
            holds,
            intermediate_lhs: f64::NAN,
            intermediate_rhs: f64::NAN,
            intermediate_holds: false,
            drop: f64::NAN,
            cross_gap: f64::NAN,
            cross_ok: false,
        });
    }
    let rho = sum_score_projection(&s, &s)?;
    // f(y₁ + y₂) = √2 ρ̃((y₁+y₂)/√2) = 2ρ̄(y₁+y₂)
    let f = GridFunction::new(rho.score.x_min, rho.score.h, rho.score.values.iter().map(|v| 2.0 * v).collect());
    let proj = additive_projection(&f, &s, &s)?;
    let g = &proj.g1;
    let lhs = s.expect(|y| (g.eval(y).unwrap_or(0.0) + y).powi(2));
    let rhs = if j1 > 0.0 { j2 * j2 / j1 } else { 0.0 };
    let drop = fisher_drop(&s)?.drop;
    let cross_gap = (j1 - drop - j2).abs() / j2.max(1e-8);
    Ok(TwoFoldReport {
        j1,
        j2,
        r_star,
        bound,
        slack,
        vacuous,
        holds,
        intermediate_lhs: lhs,
        intermediate_rhs: rhs,
        intermediate_holds: lhs >= rhs - INTERMEDIATE_TOL,
        drop,
        cross_gap,
        cross_ok: cross_gap < CROSS_TOL,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SkewRow {
    pub n: u32,
    #[serde(rename = "J", with = "extended")]
    pub j: f64,
    pub floor: f64,
    #[serde(rename = "nJ", with = "extended")]
    pub nj: f64,
    pub holds: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SkewnessReport {
    pub skewness_s: f64,
    /// `s²/3`, the limit of `n·J(Uₙ)` from below implied by the floor.
    pub asymptote: f64,
    pub rows: Vec<SkewRow>,
    /// Every finite `n·J(Uₙ)` is at least `s²/3`.
    pub nj_above_asymptote: bool,
}

impl SkewnessReport {
    pub fn holds(&self) -> bool {
        self.rows.iter().all(|r| r.holds)
    }
}

/// Per-`n` floor `J(Uₙ) ≥ m₃²/(m₂m₄)` and `n·J(Uₙ)` against `s²/3`.
pub fn skewness_floor(spec: &DistributionSpec, n_set: &[u32], grid: &GridSpec) -> Result<SkewnessReport> {
    check_n_set(n_set)?;
    let d = materialize(spec, grid)?;
    let s = skewness(&d);
    let sums = standardized_sums(&d, n_set)?;
    let rows: Vec<SkewRow> = n_set
        .par_iter()
        .map(|n| {
            let u = &sums.entries[n];
            let j = standardized_fisher(u);
            let floor = moments(u, 3).powi(2) / (u.variance() * moments(u, 4));
            SkewRow { n: *n, j, floor, nj: *n as f64 * j, holds: !j.is_finite() || j >= floor - SLACK_TOL }
        })
        .collect();
    let asymptote = s * s / 3.0;
    let nj_above_asymptote = rows.iter().filter(|r| r.nj.is_finite()).all(|r| r.nj >= asymptote - SLACK_TOL);
    Ok(SkewnessReport { skewness_s: s, asymptote, rows, nj_above_asymptote })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DoublingReport {
    /// `n = 2ᵏ` for `k = 0..=k_max`.
    pub n: Vec<u32>,
    #[serde(rename = "J")]
    pub j: Vec<JValue>,
    /// Smallest `m ∈ {1, 2, 4}` with finite `J(U_m)`.
    pub first_finite: Option<u32>,
    /// `J(S_k) − J(S_{k+1})` from the first finite term on.
    pub decay: Vec<f64>,
    pub non_increasing: bool,
    pub differences_shrink: bool,
}

/// A real that may be infinite, for sequences in JSON.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct JValue(#[serde(with = "extended")] pub f64);

impl DoublingReport {
    pub fn holds(&self) -> bool {
        self.first_finite.is_some() && self.non_increasing && self.differences_shrink
    }
}

/// `J(S_k)` along the doubling subsequence `S_k = U_{2ᵏ}`.
pub fn monotone_doubling(spec: &DistributionSpec, k_max: u32, grid: &GridSpec) -> Result<DoublingReport> {
    if k_max > 12 {
        return Err(Error::InvalidParams(format!("k_max = {k_max} exceeds 12")));
    }
    let d = materialize(spec, grid)?;
    let n: Vec<u32> = (0..=k_max).map(|k| 1u32 << k).collect();
    let sums = standardized_sums(&d, &n)?;
    let j: Vec<f64> = n.par_iter().map(|m| standardized_fisher(&sums.entries[m])).collect();
    let start = n.iter().zip(&j).position(|(m, v)| *m <= 4 && v.is_finite());
    let (decay, non_increasing, differences_shrink) = match start {
        Some(i) => {
            let tail = &j[i..];
            let decay: Vec<f64> = tail.windows(2).map(|w| w[0] - w[1]).collect();
            let ni = tail.iter().all(|v| v.is_finite()) && decay.iter().all(|dv| *dv >= -FLAT_TOL);
            let shrink = decay.windows(2).all(|w| w[1] <= w[0] + FLAT_TOL);
            (decay, ni, shrink)
        }
        None => (Vec::new(), false, false),
    };
    Ok(DoublingReport {
        first_finite: start.map(|i| n[i]),
        n,
        j: j.into_iter().map(JValue).collect(),
        decay,
        non_increasing,
        differences_shrink,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TailRow {
    pub n: u32,
    pub psi: Vec<f64>,
    pub fisher_infinite: bool,
    pub non_increasing: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TailClassReport {
    pub radii: Vec<f64>,
    pub rows: Vec<TailRow>,
    /// Largest `ψₙ(R)` over the rows with finite Fisher information.
    pub envelope: Vec<f64>,
    pub envelope_decays: bool,
}

impl TailClassReport {
    pub fn holds(&self) -> bool {
        self.rows.iter().filter(|r| !r.fisher_infinite).all(|r| r.non_increasing) && self.envelope_decays
    }

    /// Table with one row per `n` and one column per radius.
    pub fn to_csv(&self) -> String {
        let names: Vec<String> = self.radii.iter().map(|r| format!("psi_{}", fmt_real(*r))).collect();
        let mut header = vec!["n"];
        header.extend(names.iter().map(|s| s.as_str()));
        let rows: Vec<Vec<String>> = self
            .rows
            .iter()
            .map(|r| std::iter::once(r.n.to_string()).chain(r.psi.iter().map(|v| fmt_real(*v))).collect())
            .collect();
        csv_table(&header, &rows)
    }
}

/// `ψₙ(R) = σ² E[ρₙ(Uₙ)² 1(|Uₙ| ≥ R)]` for each `n` and radius.
pub fn tail_class_profile(
    spec: &DistributionSpec,
    n_set: &[u32],
    radii: &[f64],
    grid: &GridSpec,
) -> Result<TailClassReport> {
    check_n_set(n_set)?;
    if radii.is_empty() || radii.iter().any(|r| !(*r >= 0.0)) || radii.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::InvalidParams("radii must be increasing and nonnegative".into()));
    }
    let d = materialize(spec, grid)?;
    let sums = standardized_sums(&d, n_set)?;
    let rows: Vec<TailRow> = n_set
        .par_iter()
        .map(|n| {
            let p = tail_score_mass(&sums.entries[n], radii)?;
            Ok(TailRow { n: *n, non_increasing: p.non_increasing(), psi: p.psi, fisher_infinite: p.fisher_infinite })
        })
        .collect::<Result<_>>()?;
    let envelope: Vec<f64> = (0..radii.len())
        .map(|k| rows.iter().filter(|r| !r.fisher_infinite).map(|r| r.psi[k]).fold(0.0, f64::max))
        .collect();
    let envelope_decays = envelope.windows(2).all(|w| w[1] <= w[0] + 1e-12)
        && envelope.last().zip(envelope.first()).is_some_and(|(l, f)| l < f);
    Ok(TailClassReport { radii: radii.to_vec(), rows, envelope, envelope_decays })
}

/// Law of `X + Z_τ` for discrete `X` and `Z_τ ~ N(0, τ)`.
pub fn smoothed_discrete(atoms: &[f64], weights: &[f64], tau: f64) -> Result<DistributionSpec> {
    if !(tau > 0.0) || !tau.is_finite() {
        return Err(Error::InvalidParams(format!("tau must be > 0, got {tau}")));
    }
    if atoms.is_empty() || atoms.len() != weights.len() {
        return Err(Error::InvalidParams("atoms and weights must be nonempty and of equal length".into()));
    }
    let family = Family::GaussianMixture {
        weights: weights.to_vec(),
        means: atoms.to_vec(),
        vars: vec![tau; atoms.len()],
    };
    family.validate()?;
    Ok(family.spec())
}

/// [`verify_o1n`] on the smoothed law of a discrete `X`.
pub fn smoothed_discrete_demo(
    atoms: &[f64],
    weights: &[f64],
    tau: f64,
    n_set: &[u32],
    grid: &GridSpec,
) -> Result<SweepReport> {
    verify_o1n(&smoothed_discrete(atoms, weights, tau)?, n_set, grid)
}

/// The families the sweeps run on by default.
pub fn shipped_families() -> Vec<(&'static str, DistributionSpec)> {
    let r3 = 3f64.sqrt();
    vec![
        ("normal", Family::normal(0.0, 1.0).spec()),
        ("exponential", Family::exponential(1.0).standardized()),
        ("gamma5", Family::gamma(5.0).standardized()),
        ("gamma8", Family::gamma(8.0).standardized()),
        ("uniform", Family::uniform(-r3, r3).spec()),
        ("laplace", Family::laplace(0.0, 1.0).standardized()),
        ("two_bump", Family::two_bump().spec()),
    ]
}
