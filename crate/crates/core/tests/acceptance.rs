//! Acceptance suite: one line per criterion, nonzero exit if any fails.

use std::process::ExitCode;
use std::time::Instant;

use fisher_clt::convolution::{fisher_drop, score_oracle_gap, standardized_sums};
use fisher_clt::debruijn::{debruijn_entropy, DEFAULT_CLIP, DEFAULT_NODES};
use fisher_clt::harness::{
    monotone_doubling, shipped_families, skewness_floor, smoothed_discrete, verify_o1n, verify_two_fold, Status,
    SweepReport, DEFAULT_N_SET,
};
use fisher_clt::poincare::restricted_poincare;
use fisher_clt::projection::telescoping_decomposition;
use fisher_clt::testfn::TestFunction;
use fisher_clt::{materialize, standardized_fisher, DistributionSpec, Family, GridDensity, GridSpec};

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome { pass, detail: detail.into() }
}

fn std_grid(f: Family, points: usize) -> GridDensity {
    materialize(&f.standardized(), &GridSpec::with_points(points)).expect("materialize")
}

fn correlation(d: &GridDensity, g: &[f64], f: impl Fn(f64) -> f64) -> f64 {
    let fv: Vec<f64> = (0..d.len()).map(|i| f(d.x(i))).collect();
    let (mg, mf) = (d.expect_values(g), d.expect_values(&fv));
    let prod = |a: &[f64], ma: f64, b: &[f64], mb: f64| {
        let v: Vec<f64> = a.iter().zip(b).map(|(x, y)| (x - ma) * (y - mb)).collect();
        d.expect_values(&v)
    };
    prod(g, mg, &fv, mf) / (prod(g, mg, g, mg) * prod(&fv, mf, &fv, mf)).sqrt()
}

fn ac1() -> Outcome {
    let t = Instant::now();
    let d = std_grid(Family::exponential(1.0), 4096);
    let n_set = [4, 8, 16, 32, 64];
    let sums = standardized_sums(&d, &n_set).expect("sums");
    let mut worst: f64 = 0.0;
    for n in n_set {
        let want = 2.0 / (n as f64 - 2.0);
        worst = worst.max((standardized_fisher(&sums.entries[&n]) - want).abs() / want);
    }
    let secs = t.elapsed().as_secs_f64();
    outcome(worst < 1e-3 && secs < 30.0, format!("max rel err {worst:.2e}, {secs:.1}s"))
}

fn ac2() -> Outcome {
    let mut worst: f64 = 0.0;
    let mut corr: f64 = 1.0;
    for v in [0.25, 1.0, 4.0] {
        let d = materialize(&Family::normal(0.0, v).spec(), &GridSpec::default()).expect("materialize");
        let r = restricted_poincare(&d).expect("solver");
        worst = worst.max((r.value - 0.5 * v).abs() / (0.5 * v));
        corr = corr.min(correlation(&d, &r.extremal.values, |x| x * x - v).abs());
    }
    outcome(worst < 1e-3 && corr > 0.999, format!("max rel err {worst:.2e}, min |corr| {corr:.6}"))
}

fn ac3() -> Outcome {
    let mut ok = true;
    let mut parts = Vec::new();
    for (name, f) in [("gamma5", Family::gamma(5.0)), ("two_bump", Family::two_bump())] {
        let t = Instant::now();
        let coarse = fisher_drop(&std_grid(f.clone(), 4096)).expect("drop").relative_gap();
        let secs = t.elapsed().as_secs_f64();
        let fine = fisher_drop(&std_grid(f, 8192)).expect("drop").relative_gap();
        ok &= coarse < 1e-2 && fine <= 0.5 * coarse && secs < 60.0;
        parts.push(format!("{name} {coarse:.2e}->{fine:.2e} ({secs:.1}s)"));
    }
    outcome(ok, parts.join("; "))
}

fn sweeps() -> Vec<(&'static str, SweepReport)> {
    shipped_families()
        .into_iter()
        .map(|(name, spec)| (name, verify_o1n(&spec, &DEFAULT_N_SET, &GridSpec::default()).expect("sweep")))
        .collect()
}

fn ac4(sweeps: &[(&str, SweepReport)]) -> Outcome {
    let mut ok = true;
    let mut parts = Vec::new();
    for (name, r) in sweeps.iter().filter(|(n, _)| ["gamma5", "gamma8", "two_bump"].contains(n)) {
        let bad: Vec<String> = r
            .rows
            .iter()
            .filter(|row| {
                !(row.status == Status::Pass && row.slack_thm >= -1e-6 && row.slack_sharp >= -1e-6 && row.flags.d_le_bound)
            })
            .map(|row| format!("n={} {}", row.n, row.flags.label()))
            .collect();
        ok &= bad.is_empty();
        if bad.is_empty() {
            parts.push(format!("{name} ok"));
        } else {
            parts.push(format!("{name} [{}] 2R*/sigma2={:.4}", bad.join(", "), 2.0 * r.constants.r_star / r.constants.sigma2));
        }
    }
    outcome(ok, parts.join("; "))
}

fn ac5() -> Outcome {
    let mut ok = true;
    let mut parts = Vec::new();
    for (name, spec) in shipped_families() {
        let r = verify_two_fold(&spec, &GridSpec::default()).expect("two-fold");
        if r.vacuous {
            continue;
        }
        ok &= r.holds && r.intermediate_holds;
        parts.push(format!("{name} slack {:.2e} mid {:.2e}", r.slack, r.intermediate_lhs - r.intermediate_rhs));
    }
    outcome(ok, parts.join("; "))
}

fn ac6() -> Outcome {
    let mut ok = true;
    let mut parts = Vec::new();
    for (name, f) in [("two_bump", Family::two_bump()), ("exponential", Family::exponential(1.0))] {
        let p = debruijn_entropy(&std_grid(f, 4096), DEFAULT_NODES, DEFAULT_CLIP).expect("path");
        ok &= p.relative_gap() < 1e-2;
        parts.push(format!("{name} {:.2e}", p.relative_gap()));
    }
    outcome(ok, parts.join("; "))
}

fn ac7(sweeps: &[(&str, SweepReport)]) -> Outcome {
    let mut checked = 0;
    let mut bad = Vec::new();
    for (name, r) in sweeps {
        for row in r.rows.iter().filter(|row| row.j.is_finite()) {
            checked += 1;
            if !row.distances.holds() {
                bad.push(format!("{name} n={}", row.n));
            }
        }
    }
    outcome(bad.is_empty(), format!("{checked} rows, violations: [{}]", bad.join(", ")))
}

fn ac8() -> Outcome {
    let grid = GridSpec::default();
    let specs: Vec<(&str, DistributionSpec)> = vec![
        ("exponential", Family::exponential(1.0).standardized()),
        ("gamma5", Family::gamma(5.0).standardized()),
        ("gamma8", Family::gamma(8.0).standardized()),
        ("coin", smoothed_discrete(&[-1.0, 1.0], &[0.5, 0.5], 0.25).expect("spec")),
        ("three_atoms", smoothed_discrete(&[-1.0, 0.0, 2.0], &[0.3, 0.5, 0.2], 0.5).expect("spec")),
    ];
    let mut ok = true;
    let mut parts = Vec::new();
    for (name, spec) in specs {
        let r = skewness_floor(&spec, &DEFAULT_N_SET, &grid).expect("floor");
        ok &= r.holds();
        if name == "exponential" {
            let asym = r.rows.iter().filter(|row| row.n >= 4).all(|row| row.nj.is_finite() && row.nj > 4.0 / 3.0);
            ok &= asym;
            let min = r.rows.iter().filter(|row| row.n >= 4).map(|row| row.nj).fold(f64::INFINITY, f64::min);
            parts.push(format!("exp min nJ {min:.4}"));
        } else {
            parts.push(format!("{name} {}", if r.holds() { "ok" } else { "violated" }));
        }
    }
    outcome(ok, parts.join("; "))
}

fn ac9() -> Outcome {
    let t = Instant::now();
    let mut ok = true;
    let mut worst: f64 = 0.0;
    for f in [Family::normal(0.0, 1.0), Family::two_bump()] {
        let d = std_grid(f, 4096);
        for n in [2, 4, 8] {
            for tf in TestFunction::bank(7) {
                let r = telescoping_decomposition(&tf, &d, n).expect("telescoping");
                worst = worst.max(r.sum_gap());
                ok &= r.sum_gap() < 1e-5 && r.t_bounds_hold() && r.eq8_holds();
            }
        }
    }
    let secs = t.elapsed().as_secs_f64();
    outcome(ok && secs < 120.0, format!("max |s_n - sum t| {worst:.2e}, {secs:.1}s"))
}

fn ac10() -> Outcome {
    let r = monotone_doubling(&Family::exponential(1.0).standardized(), 6, &GridSpec::default()).expect("doubling");
    let infinite = !r.j[0].0.is_finite() && !r.j[1].0.is_finite();
    let ok = infinite && r.first_finite == Some(4) && r.holds();
    let js: Vec<String> = r.j.iter().map(|v| format!("{:.4}", v.0)).collect();
    outcome(ok, format!("J(S_k) = [{}]", js.join(", ")))
}

fn ac11() -> Outcome {
    let mut ok = true;
    let mut parts = Vec::new();
    for (name, spec) in shipped_families() {
        let d = materialize(&spec, &GridSpec::default()).expect("materialize");
        if !standardized_fisher(&d).is_finite() {
            continue;
        }
        let gap = score_oracle_gap(&d, &d).expect("projection");
        ok &= gap < 1e-3;
        parts.push(format!("{name} {gap:.2e}"));
    }
    outcome(ok, parts.join("; "))
}

fn main() -> ExitCode {
    let t = Instant::now();
    let sw = sweeps();
    let checks: Vec<(&str, &str, Box<dyn Fn() -> Outcome + '_>)> = vec![
        ("AC1", "gamma law exactness", Box::new(ac1)),
        ("AC2", "restricted Poincare constant of the normal", Box::new(ac2)),
        ("AC3", "Fisher drop identity", Box::new(ac3)),
        ("AC4", "O(1/n) sweep bounds", Box::new(|| ac4(&sw))),
        ("AC5", "two-fold bound", Box::new(ac5)),
        ("AC6", "de Bruijn consistency", Box::new(ac6)),
        ("AC7", "distance chain", Box::new(|| ac7(&sw))),
        ("AC8", "skewness floor", Box::new(ac8)),
        ("AC9", "telescoping", Box::new(ac9)),
        ("AC10", "monotone doubling", Box::new(ac10)),
        ("AC11", "projected score oracle", Box::new(ac11)),
    ];
    let mut failed = 0;
    for (id, name, run) in &checks {
        let o = run();
        if !o.pass {
            failed += 1;
        }
        println!("{id:<5} {} {name}: {}", if o.pass { "PASS" } else { "FAIL" }, o.detail);
    }
    println!("{} of {} criteria passed in {:.1}s", checks.len() - failed, checks.len(), t.elapsed().as_secs_f64());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
