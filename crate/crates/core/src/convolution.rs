//! Densities and scores of independent sums.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::density::{scale, standardize};
use crate::error::{Error, Result};
use crate::family::EDGE_MARGIN;
use crate::grid::{cubic_interp, encode_left_jump, encode_right_jump, GridDensity, GridFunction, PlainSamples};
use crate::info::{fisher_information, score, ScoreField, DEFAULT_FLOOR};
use crate::spectral::standardized_sum;

/// Largest output grid `convolve` will build.
pub const MAX_CONV_POINTS: usize = 1 << 20;
/// Relative density floor for the summand score inside
/// [`sum_score_projection`]. Far below the default mask, because the
/// conditional expectation in the tails of the sum draws on the tails of
/// the summand.
pub const PROJECTION_FLOOR: f64 = 1e-30;
/// Width in nodes of the band at an open grid end.
const OPEN_END_BAND: usize = 8;
/// Largest share of a sum's density drawn from open-end bands for the
/// projected score to count as valid.
const OPEN_END_SHARE: f64 = 1e-6;
/// Largest `n` accepted by [`standardized_sums`].
pub const MAX_SUM_N: u32 = 4096;

/// Resamples `d` onto step `h` by cubic interpolation of its one-sided
/// samples, keeping jump edges on nodes.
pub fn resample(d: &GridDensity, h: f64) -> Result<GridDensity> {
    if !(h > 0.0) {
        return Err(Error::InvalidGrid(format!("step {h}")));
    }
    let plain = d.plain_samples();
    let (a, b) = (d.x(plain.lo), d.x(plain.hi));
    let support = &plain.values[plain.lo..=plain.hi];
    let k = ((b - a) / h).floor() as usize;
    let m = EDGE_MARGIN;
    let n = k + 1 + 2 * m;
    let x_min = a - m as f64 * h;
    let mut v = vec![0.0; n];
    for (j, vj) in v.iter_mut().enumerate().skip(m).take(k + 1) {
        *vj = cubic_interp(a, d.h(), support, x_min + h * j as f64).unwrap_or(0.0).max(0.0);
    }
    if plain.left_jump && k >= 3 {
        encode_left_jump(&mut v, m, support[0], h);
    }
    if plain.right_jump && k >= 3 {
        let p0 = v[m + k];
        encode_right_jump(&mut v, m + k, p0, h);
    }
    for vj in v.iter_mut() {
        *vj = vj.max(0.0);
    }
    GridDensity::from_values(x_min, h, v)
}

pub(crate) fn congruent(d1: &GridDensity, d2: &GridDensity) -> Result<(GridDensity, GridDensity)> {
    let (h1, h2) = (d1.h(), d2.h());
    if ((h1 - h2) / h1.min(h2)).abs() <= 1e-12 {
        Ok((d1.clone(), d2.clone()))
    } else if h1 > h2 {
        Ok((resample(d1, h2)?, d2.clone()))
    } else {
        Ok((d1.clone(), resample(d2, h1)?))
    }
}

/// Direct sums `Σ_i c_i a_i b_{m−i}` with trapezoid weights `c_i` over the
/// intersection of the two supports, for every output node `m`.
fn product_sums(a: &PlainSamples, b: &PlainSamples, av: &[f64], h: f64) -> Vec<f64> {
    let n = a.values.len() + b.values.len() - 1;
    (0..n)
        .into_par_iter()
        .map(|m| {
            let lo = a.lo.max(m.saturating_sub(b.hi));
            if m < b.lo {
                return 0.0;
            }
            let hi = a.hi.min(m - b.lo);
            if hi <= lo {
                return 0.0;
            }
            let mut s = 0.5 * (av[lo] * b.values[m - lo] + av[hi] * b.values[m - hi]);
            for i in lo + 1..hi {
                s += av[i] * b.values[m - i];
            }
            s * h
        })
        .collect()
}

/// Density of `X_1 + X_2` for independent `X_1 ~ d1`, `X_2 ~ d2`.
///
/// The integral `∫ p_1(s−y) p_2(y) dy` is evaluated at every node of the
/// sum grid by the trapezoid rule over the overlap of the two supports,
/// which keeps jump densities second-order accurate. Steps must agree;
/// otherwise the coarser density is resampled.
pub fn convolve(d1: &GridDensity, d2: &GridDensity) -> Result<GridDensity> {
    let (a, b) = congruent(d1, d2)?;
    let n = a.len() + b.len() - 1;
    if n > MAX_CONV_POINTS {
        return Err(Error::Budget(n));
    }
    let (pa, pb) = (a.plain_samples(), b.plain_samples());
    let v = product_sums(&pa, &pb, &pa.values, a.h());
    GridDensity::from_values(a.x_min() + b.x_min(), a.h(), v)
}

/// `(Y_1 + Y_2)/√2` for independent copies of the standardized `d`,
/// standardized again.
pub fn double(d: &GridDensity) -> Result<GridDensity> {
    let s = standardize(d)?;
    standardize(&scale(&convolve(&s, &s)?, std::f64::consts::FRAC_1_SQRT_2)?)
}

/// Standardized sums `U_n` of one base law.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SumSequence {
    pub base: GridDensity,
    pub entries: BTreeMap<u32, GridDensity>,
    pub doubling_index: Vec<u32>,
}

impl SumSequence {
    pub fn get(&self, n: u32) -> Option<&GridDensity> {
        self.entries.get(&n)
    }

    /// `S_k = U_{2^k}` when present.
    pub fn doubling(&self, k: u32) -> Option<&GridDensity> {
        self.entries.get(&(1u32 << k))
    }
}

/// `U_n` for each `n` in `n_set`: `U_1` by standardization, `U_2` by a
/// direct self-convolution, larger `n` by powering the characteristic
/// function. Entries are computed concurrently.
pub fn standardized_sums(d: &GridDensity, n_set: &[u32]) -> Result<SumSequence> {
    if n_set.is_empty() || n_set.windows(2).any(|w| w[0] >= w[1]) || n_set[0] == 0 {
        return Err(Error::InvalidParams("n_set must be strictly increasing positive integers".into()));
    }
    if let Some(&n) = n_set.iter().find(|n| **n > MAX_SUM_N) {
        return Err(Error::InvalidParams(format!("n = {n} exceeds {MAX_SUM_N}")));
    }
    let points = d.len();
    let laws: Vec<Result<GridDensity>> = n_set
        .par_iter()
        .map(|&n| match n {
            1 => standardize(d),
            2 => double(d),
            _ => standardized_sum(d, n, points),
        })
        .collect();
    let mut entries = BTreeMap::new();
    for (n, l) in n_set.iter().zip(laws) {
        entries.insert(*n, l?);
    }
    let doubling_index = n_set.iter().filter(|n| n.is_power_of_two()).map(|n| n.trailing_zeros()).collect();
    Ok(SumSequence { base: d.clone(), entries, doubling_index })
}

/// Copy with the nodes near a grid end that cuts through the support set
/// to zero. Mass of a sum drawn from these nodes signals that the sum
/// depends on tails the grid does not hold.
fn without_open_ends(p: &PlainSamples) -> PlainSamples {
    let mut q = p.clone();
    let n = q.values.len();
    let band = OPEN_END_BAND.min(n / 4);
    if p.lo == 0 {
        q.values[..band].iter_mut().for_each(|v| *v = 0.0);
    }
    if p.hi == n - 1 {
        q.values[n - band..].iter_mut().for_each(|v| *v = 0.0);
    }
    q
}

/// Score of `S = Y_1 + Y_2` as the conditional expectation
/// `ρ̄(s) = E[ρ_2(Y_2) | S = s]`, which needs a score for `Y_2` only.
///
/// The mask keeps nodes with density above the default floor whose
/// conditional law draws less than `1e-6` of its mass from the outermost
/// nodes of a grid that truncates a tail.
pub fn sum_score_projection(d1: &GridDensity, d2: &GridDensity) -> Result<ScoreField> {
    if !fisher_information(d2).is_finite() {
        return Err(Error::InfiniteFisher);
    }
    let (a, b) = congruent(d1, d2)?;
    let n = a.len() + b.len() - 1;
    if n > MAX_CONV_POINTS {
        return Err(Error::Budget(n));
    }
    let sb = score(&b, PROJECTION_FLOOR)?;
    let (pa, pb) = (a.plain_samples(), b.plain_samples());
    let h = a.h();
    let dens = product_sums(&pa, &pb, &pa.values, h);
    let (ia, ib) = (without_open_ends(&pa), without_open_ends(&pb));
    let inner = product_sums(&ia, &ib, &ia.values, h);
    let mut weighted = pb.clone();
    for (i, v) in weighted.values.iter_mut().enumerate() {
        *v = if sb.valid_mask[i] { *v * sb.score.values[i] } else { 0.0 };
    }
    let num = product_sums(&pa, &weighted, &pa.values, h);
    let x_min = a.x_min() + b.x_min();
    let sum = GridDensity::from_values(x_min, h, dens.clone())?;
    let peak = dens.iter().cloned().fold(0.0, f64::max);
    let mask: Vec<bool> = (0..n)
        .map(|m| dens[m] > DEFAULT_FLOOR * peak && dens[m] - inner[m] <= OPEN_END_SHARE * dens[m])
        .collect();
    if !mask.iter().any(|m| *m) {
        return Err(Error::DegenerateDensity);
    }
    let rho = dens.iter().zip(&num).zip(&mask).map(|((p, q), m)| if *m { q / p } else { 0.0 }).collect();
    Ok(ScoreField {
        score: GridFunction::new(x_min, h, rho),
        valid_mask: mask,
        density_ref: sum,
        floor: DEFAULT_FLOOR,
    })
}

/// Largest gap between two score fields over nodes valid in both and with
/// `|x| ≤ radius`. Nodes of `b` are matched to the nearest node.
pub fn masked_sup_gap(a: &ScoreField, b: &ScoreField, radius: f64) -> f64 {
    let mut worst: f64 = 0.0;
    for i in 0..a.score.len() {
        let x = a.score.x(i);
        if x.abs() > radius {
            continue;
        }
        let j = ((x - b.score.x_min) / b.score.h).round();
        if j < 0.0 || j as usize >= b.score.len() {
            continue;
        }
        if let (Some(u), Some(v)) = (a.value(i), b.value(j as usize)) {
            worst = worst.max((u - v).abs());
        }
    }
    worst
}

/// Masked sup distance between [`sum_score_projection`] and the score of
/// the directly convolved density.
pub fn score_oracle_gap(d1: &GridDensity, d2: &GridDensity) -> Result<f64> {
    let r = sum_score_projection(d1, d2)?;
    let direct = score(&r.density_ref, DEFAULT_FLOOR)?;
    Ok(masked_sup_gap(&r, &direct, f64::INFINITY))
}

/// Both sides of the Fisher-drop identity for two independent copies of `d`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FisherDropReport {
    #[serde(rename = "I_single")]
    pub i_single: f64,
    #[serde(rename = "I_pair_scaled")]
    pub i_pair_scaled: f64,
    pub drop: f64,
    pub residual_sq: f64,
    pub identity_gap: f64,
    pub lambda_opt: f64,
}

impl FisherDropReport {
    /// `|drop − residual_sq| / max(drop, 1e-8)`.
    pub fn relative_gap(&self) -> f64 {
        self.identity_gap / self.drop.max(1e-8)
    }
}

/// `I(Y_1) − I((Y_1+Y_2)/√2)` against `2E(ρ̄(Y_1+Y_2) − (ρ(Y_1)+ρ(Y_2))/2)²`,
/// the latter by the tensor trapezoid rule on the product grid restricted
/// to the score masks. `lambda_opt = J'/J` with `J'` the standardized
/// Fisher information of the normalized pair.
pub fn fisher_drop(d: &GridDensity) -> Result<FisherDropReport> {
    let single = fisher_information(d);
    if !single.is_finite() {
        return Err(Error::InfiniteFisher);
    }
    let proj = sum_score_projection(d, d)?;
    let pair = fisher_information(&proj.density_ref);
    if !pair.is_finite() {
        return Err(Error::InfiniteFisher);
    }
    let i_single = single.value;
    let i_pair_scaled = 2.0 * pair.value;
    let sd = score(d, DEFAULT_FLOOR)?;
    let q = d.masses();
    let n = d.len();
    let rho = &sd.score.values;
    let mask = &sd.valid_mask;
    let rbar = &proj.score.values;
    let rmask = &proj.valid_mask;
    let rows: Vec<f64> = (0..n)
        .into_par_iter()
        .map(|i| {
            if !mask[i] {
                return 0.0;
            }
            let mut s = 0.0;
            for j in 0..n {
                if mask[j] && rmask[i + j] {
                    let e = rbar[i + j] - 0.5 * (rho[i] + rho[j]);
                    s += q[j] * e * e;
                }
            }
            q[i] * s
        })
        .collect();
    let residual_sq = 2.0 * rows.iter().sum::<f64>();
    let drop = i_single - i_pair_scaled;
    let v = d.variance();
    let j = v * i_single - 1.0;
    let j_pair = v * i_pair_scaled - 1.0;
    let lambda_opt = if j > 1e-12 { j_pair / j } else { 0.0 };
    Ok(FisherDropReport {
        i_single,
        i_pair_scaled,
        drop,
        residual_sq,
        identity_gap: (drop - residual_sq).abs(),
        lambda_opt,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::family::{materialize, Family, GridSpec};
    use crate::info::standardized_fisher;

    fn std_mat(f: Family) -> GridDensity {
        materialize(&f.standardized(), &GridSpec::default()).unwrap()
    }

    fn sup_against(d: &GridDensity, f: impl Fn(f64) -> f64) -> f64 {
        (0..d.len()).map(|i| (d.values()[i] - f(d.x(i))).abs()).fold(0.0, f64::max)
    }

    #[test]
    fn normal_convolution() {
        let d = materialize(&Family::normal(0.0, 1.0).spec(), &GridSpec::default()).unwrap();
        let s = convolve(&d, &d).unwrap();
        let g = Family::normal(0.0, 2.0);
        assert!(sup_against(&s, |x| g.pdf(x)) < 1e-6);
        assert!((s.variance() - 2.0).abs() < 1e-5);
    }

    #[test]
    fn exponential_convolution_is_gamma2() {
        let d = std_mat(Family::exponential(1.0));
        let s = convolve(&d, &d).unwrap();
        let g = Family::gamma(2.0);
        let err = sup_against(&s, |x| g.pdf(x + 2.0));
        assert!(err < 1e-5, "{err}");
        assert!(s.mean().abs() < 1e-5, "{}", s.mean());
        assert!((s.variance() - 2.0).abs() < 1e-5);
    }

    #[test]
    fn variances_add_on_mismatched_steps() {
        let a = materialize(&Family::gamma(5.0).spec(), &GridSpec::default()).unwrap();
        let b = materialize(&Family::two_bump().spec(), &GridSpec::default()).unwrap();
        let s = convolve(&a, &b).unwrap();
        assert!((s.variance() - a.variance() - b.variance()).abs() < 1e-5);
        assert!((s.mean() - a.mean() - b.mean()).abs() < 1e-5);
    }

    #[test]
    fn uniform_pair_is_triangle() {
        let d = std_mat(Family::uniform(0.0, 1.0));
        let seq = standardized_sums(&d, &[1, 2]).unwrap();
        let u2 = seq.get(2).unwrap();
        let w = 6f64.sqrt();
        let err = sup_against(u2, |x| ((w - x.abs()) / 6.0).max(0.0));
        assert!(err < 1e-6, "{err}");
    }

    #[test]
    fn sums_are_standardized() {
        let d = std_mat(Family::gamma(3.0));
        let seq = standardized_sums(&d, &[1, 2, 3, 8]).unwrap();
        for (n, u) in &seq.entries {
            assert!(u.mean().abs() < 1e-6, "n={n}");
            assert!((u.variance() - 1.0).abs() < 1e-4, "n={n}");
        }
        assert_eq!(seq.doubling_index, vec![0, 1, 3]);
        assert_eq!(seq.get(1).unwrap(), &standardize(&d).unwrap());
    }

    #[test]
    fn exponential_four_fold_sum() {
        let d = std_mat(Family::exponential(1.0));
        let seq = standardized_sums(&d, &[4]).unwrap();
        assert!((standardized_fisher(seq.get(4).unwrap()) - 1.0).abs() < 2e-3);
    }

    #[test]
    fn gaussian_sum_score() {
        let d = std_mat(Family::normal(0.0, 1.0));
        let r = sum_score_projection(&d, &d).unwrap();
        for i in 0..r.score.len() {
            if let Some(v) = r.value(i) {
                let s = r.score.x(i);
                if s.abs() < 10.0 {
                    assert!((v + s / 2.0).abs() < 1e-4, "s={s} v={v}");
                }
            }
        }
    }

    #[test]
    fn one_sided_smoothing_suffices() {
        let e = std_mat(Family::exponential(1.0));
        let z = std_mat(Family::normal(0.0, 1.0));
        assert!(matches!(sum_score_projection(&z, &e), Err(Error::InfiniteFisher)));
        let r = sum_score_projection(&e, &z).unwrap();
        let direct = score(&r.density_ref, DEFAULT_FLOOR).unwrap();
        assert!(masked_sup_gap(&r, &direct, 6.0) < 1e-3);
    }

    #[test]
    fn mixture_sum_score_matches_direct() {
        let d = std_mat(Family::two_bump());
        let r = sum_score_projection(&d, &d).unwrap();
        let direct = score(&convolve(&d, &d).unwrap(), DEFAULT_FLOOR).unwrap();
        let gap = masked_sup_gap(&r, &direct, f64::INFINITY);
        assert!(gap < 1e-3, "{gap}");
    }

    #[test]
    fn fisher_drop_of_normal_vanishes() {
        let d = std_mat(Family::normal(0.0, 1.0));
        let r = fisher_drop(&d).unwrap();
        assert!(r.drop.abs() < 1e-6, "{r:?}");
        assert!(r.residual_sq.abs() < 1e-6, "{r:?}");
    }

    #[test]
    fn fisher_drop_of_gamma3() {
        let d = std_mat(Family::gamma(3.0));
        let r = fisher_drop(&d).unwrap();
        assert!((r.drop - 1.5).abs() < 5e-3, "{r:?}");
        assert!((r.lambda_opt - 0.25).abs() < 5e-3, "{r:?}");
    }

    #[test]
    fn fisher_drop_identity_on_mixture() {
        let d = std_mat(Family::two_bump());
        let r = fisher_drop(&d).unwrap();
        assert!(r.relative_gap() < 1e-3, "{r:?}");
        assert!(r.drop > 0.0 && (0.0..=1.0 + 1e-6).contains(&r.lambda_opt));
    }
}
