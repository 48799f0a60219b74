//! Test functions for the projection inequalities: linear, Hermite-2 and
//! seeded cubic B-splines with compact support.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::grid::{GridDensity, GridFunction};

/// A real function with a derivative, possibly defined on a bounded range.
pub trait RealFn: Sync {
    fn value(&self, x: f64) -> Option<f64>;
    fn slope(&self, x: f64) -> Option<f64>;
}

impl RealFn for GridFunction {
    fn value(&self, x: f64) -> Option<f64> {
        self.eval(x)
    }

    fn slope(&self, x: f64) -> Option<f64> {
        GridFunction::slope(self, x)
    }
}

impl<F: RealFn + ?Sized> RealFn for &F {
    fn value(&self, x: f64) -> Option<f64> {
        (**self).value(x)
    }

    fn slope(&self, x: f64) -> Option<f64> {
        (**self).slope(x)
    }
}

/// Cubic spline `Σ c_j B((x − start)/step − j)` with the cardinal cubic
/// B-spline `B` on `[0, 4]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Spline {
    pub start: f64,
    pub step: f64,
    pub coefs: Vec<f64>,
}

impl Spline {
    /// Random spline: 6 coefficients in `[−1, 1]`, support of width 2 to 5
    /// starting near the origin.
    pub fn seeded(seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let width = rng.random_range(2.0..5.0);
        let centre = rng.random_range(-1.5..1.5);
        let coefs: Vec<f64> = (0..6).map(|_| rng.random_range(-1.0..1.0)).collect();
        let step = width / (coefs.len() + 3) as f64;
        Spline { start: centre - 0.5 * width, step, coefs }
    }

    pub fn support(&self) -> (f64, f64) {
        (self.start, self.start + self.step * (self.coefs.len() + 3) as f64)
    }

    fn sum(&self, x: f64, b: fn(f64) -> f64) -> f64 {
        let u = (x - self.start) / self.step;
        self.coefs.iter().enumerate().map(|(j, c)| c * b(u - j as f64)).sum()
    }
}

fn bspline(u: f64) -> f64 {
    match u {
        u if (0.0..1.0).contains(&u) => u * u * u / 6.0,
        u if (1.0..2.0).contains(&u) => (-3.0 * u * u * u + 12.0 * u * u - 12.0 * u + 4.0) / 6.0,
        u if (2.0..3.0).contains(&u) => (3.0 * u * u * u - 24.0 * u * u + 60.0 * u - 44.0) / 6.0,
        u if (3.0..4.0).contains(&u) => (4.0 - u).powi(3) / 6.0,
        _ => 0.0,
    }
}

fn bspline_slope(u: f64) -> f64 {
    match u {
        u if (0.0..1.0).contains(&u) => 0.5 * u * u,
        u if (1.0..2.0).contains(&u) => (-9.0 * u * u + 24.0 * u - 12.0) / 6.0,
        u if (2.0..3.0).contains(&u) => (9.0 * u * u - 48.0 * u + 60.0) / 6.0,
        u if (3.0..4.0).contains(&u) => -0.5 * (4.0 - u).powi(2),
        _ => 0.0,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TestFunction {
    /// `slope · x`.
    Linear { slope: f64 },
    /// `x² − c`.
    Hermite2 { c: f64 },
    Spline(Spline),
}

impl TestFunction {
    pub fn spline(seed: u64) -> Self {
        TestFunction::Spline(Spline::seeded(seed))
    }

    /// Identity, `x² − 1` and three splines seeded from `seed`.
    pub fn bank(seed: u64) -> Vec<TestFunction> {
        let mut bank = vec![TestFunction::Linear { slope: 1.0 }, TestFunction::Hermite2 { c: 1.0 }];
        bank.extend((0..3).map(|k| TestFunction::spline(seed.wrapping_add(k))));
        bank
    }

    pub fn name(&self) -> String {
        match self {
            TestFunction::Linear { slope } => format!("linear({slope})"),
            TestFunction::Hermite2 { c } => format!("hermite2({c})"),
            TestFunction::Spline(s) => format!("spline[{:.3},{:.3}]", s.support().0, s.support().1),
        }
    }

    pub fn eval(&self, x: f64) -> f64 {
        match self {
            TestFunction::Linear { slope } => slope * x,
            TestFunction::Hermite2 { c } => x * x - c,
            TestFunction::Spline(s) => s.sum(x, bspline),
        }
    }

    pub fn deriv(&self, x: f64) -> f64 {
        match self {
            TestFunction::Linear { slope } => *slope,
            TestFunction::Hermite2 { .. } => 2.0 * x,
            TestFunction::Spline(s) => s.sum(x, bspline_slope) / s.step,
        }
    }

    /// Samples on the grid of `d`.
    pub fn on_grid(&self, d: &GridDensity) -> GridFunction {
        GridFunction::sample_on(d, |x| self.eval(x))
    }
}

impl RealFn for TestFunction {
    fn value(&self, x: f64) -> Option<f64> {
        Some(self.eval(x))
    }

    fn slope(&self, x: f64) -> Option<f64> {
        Some(self.deriv(x))
    }
}

/// A closure pair as a [`RealFn`] defined everywhere.
pub struct FnPair<F, G>(pub F, pub G);

impl<F, G> RealFn for FnPair<F, G>
where
    F: Fn(f64) -> f64 + Sync,
    G: Fn(f64) -> f64 + Sync,
{
    fn value(&self, x: f64) -> Option<f64> {
        Some((self.0)(x))
    }

    fn slope(&self, x: f64) -> Option<f64> {
        Some((self.1)(x))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bspline_is_a_partition_of_unity() {
        for k in 0..50 {
            let u = 3.0 + k as f64 / 50.0;
            let s: f64 = (0..4).map(|j| bspline(u - j as f64)).sum();
            assert!((s - 1.0).abs() < 1e-14);
        }
    }

    #[test]
    fn spline_slope_matches_differences() {
        let s = TestFunction::spline(7);
        let (a, b) = match &s {
            TestFunction::Spline(sp) => sp.support(),
            _ => unreachable!(),
        };
        assert_eq!(s.eval(a - 0.1), 0.0);
        assert_eq!(s.eval(b + 0.1), 0.0);
        let e = 1e-6;
        for k in 1..40 {
            let x = a + (b - a) * k as f64 / 40.0;
            let fd = (s.eval(x + e) - s.eval(x - e)) / (2.0 * e);
            assert!((fd - s.deriv(x)).abs() < 1e-6);
        }
    }

    #[test]
    fn bank_is_deterministic() {
        assert_eq!(TestFunction::bank(3), TestFunction::bank(3));
        assert_ne!(TestFunction::bank(3), TestFunction::bank(4));
        assert_eq!(TestFunction::bank(3).len(), 5);
    }
}
