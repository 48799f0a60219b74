//! One function per subcommand. Each returns its checks and the report
//! files; nothing is written here.

use anyhow::Result;
use fisher_clt::debruijn::{debruijn_entropy, DEFAULT_CLIP, DEFAULT_NODES};
use fisher_clt::density::{skewness, to_csv};
use fisher_clt::harness::{
    monotone_doubling, skewness_floor, tail_class_profile, verify_o1n, verify_two_fold, DoublingReport,
    SkewnessReport, Status, SweepReport, TailClassReport, TwoFoldReport,
};
use fisher_clt::info::{distance_chain_with_j, info_summary, DistanceChain, InfoSummary};
use fisher_clt::poincare::{poincare_constant, restricted_poincare, PoincareEstimate};
use fisher_clt::projection::{
    additive_projection, prop_main_check, telescoping_decomposition, PropMainReport, MAX_TELESCOPING_N,
};
use fisher_clt::report::{csv_table, extended, fmt_real, to_json, trace_csv};
use fisher_clt::testfn::TestFunction;
use fisher_clt::{materialize, standardize, DistributionSpec, GridSpec};
use serde::Serialize;

use crate::cli::{CommandKind, Format};
use crate::config::RunConfig;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    pub status: Status,
    pub detail: String,
}

fn check(name: impl Into<String>, status: Status, detail: impl Into<String>) -> Check {
    Check { name: name.into(), status, detail: detail.into() }
}

fn pass_fail(ok: bool) -> Status {
    if ok {
        Status::Pass
    } else {
        Status::Fail
    }
}

pub struct Report {
    pub file: String,
    pub format: Format,
    pub contents: String,
}

#[derive(Default)]
pub struct Outcome {
    pub checks: Vec<Check>,
    pub reports: Vec<Report>,
}

impl Outcome {
    fn csv(&mut self, file: impl Into<String>, contents: String) {
        self.reports.push(Report { file: file.into(), format: Format::Csv, contents });
    }

    fn json<T: Serialize>(&mut self, file: impl Into<String>, value: &T) -> Result<()> {
        self.reports.push(Report { file: file.into(), format: Format::Json, contents: to_json(value)? });
        Ok(())
    }

    pub fn failed(&self) -> bool {
        self.checks.iter().any(|c| c.status == Status::Fail)
    }
}

pub fn execute(cfg: &RunConfig) -> Result<Outcome> {
    match cfg.command {
        CommandKind::Info => info(cfg),
        CommandKind::Sweep => sweep(cfg),
        CommandKind::Poincare => poincare(cfg),
        CommandKind::Project => project(cfg),
        CommandKind::Debruijn => debruijn(cfg),
        CommandKind::Verify => verify(cfg),
    }
}

#[derive(Serialize)]
struct InfoReport<'a> {
    spec: &'a DistributionSpec,
    grid: GridSpec,
    mean: f64,
    variance: f64,
    skewness: f64,
    summary: InfoSummary,
    distances: DistanceChain,
}

fn info(cfg: &RunConfig) -> Result<Outcome> {
    let d = materialize(&cfg.spec, &cfg.grid)?;
    let summary = info_summary(&d);
    let distances = distance_chain_with_j(&standardize(&d)?, summary.standardized_j);
    let mut out = Outcome::default();
    out.checks.push(if summary.standardized_j.is_finite() {
        check("distance_chain", pass_fail(distances.holds()), format!("J = {}", fmt_real(summary.standardized_j)))
    } else {
        check("distance_chain", Status::Vacuous, "infinite Fisher information")
    });
    out.csv("density.csv", to_csv(&d));
    out.csv("info_trace.csv", trace_csv(&summary.refinement_trace));
    let report = InfoReport {
        spec: &cfg.spec,
        grid: cfg.grid,
        mean: d.mean(),
        variance: d.variance(),
        skewness: skewness(&d),
        summary,
        distances,
    };
    out.json("info.json", &report)?;
    Ok(out)
}

fn sweep_checks(r: &SweepReport) -> Vec<Check> {
    r.rows
        .iter()
        .map(|row| {
            check(
                format!("sweep n={}", row.n),
                row.status,
                format!(
                    "J = {}, sharp slack {}, thm slack {}, D slack {} [{}]",
                    fmt_real(row.j),
                    fmt_real(row.slack_sharp),
                    fmt_real(row.slack_thm),
                    fmt_real(row.slack_d),
                    row.flags.label()
                ),
            )
        })
        .collect()
}

fn sweep(cfg: &RunConfig) -> Result<Outcome> {
    let r = verify_o1n(&cfg.spec, &cfg.n_set, &cfg.grid)?;
    let mut out = Outcome { checks: sweep_checks(&r), ..Outcome::default() };
    out.csv("sweep.csv", r.to_csv());
    out.json("sweep.json", &r)?;
    Ok(out)
}

#[derive(Serialize)]
struct PoincareReport<'a> {
    spec: &'a DistributionSpec,
    #[serde(with = "extended")]
    value: f64,
    #[serde(with = "extended")]
    restricted: f64,
    sigma2: f64,
    full: PoincareEstimate,
    restricted_estimate: PoincareEstimate,
}

fn poincare(cfg: &RunConfig) -> Result<Outcome> {
    let d = materialize(&cfg.spec, &cfg.grid)?;
    let (full, restricted) = rayon::join(|| poincare_constant(&d), || restricted_poincare(&d));
    let (full, restricted) = (full?, restricted?);
    let value = if full.infinite { f64::INFINITY } else { full.value };
    let rstar = if restricted.infinite { f64::INFINITY } else { restricted.value };
    let mut out = Outcome::default();
    out.checks.push(check(
        "restricted_le_full",
        pass_fail(rstar <= value * (1.0 + 1e-9)),
        format!("R = {}, R* = {}", fmt_real(value), fmt_real(rstar)),
    ));
    let rows: Vec<Vec<String>> = (0..full.extremal.len())
        .map(|i| {
            let x = full.extremal.x(i);
            let g = restricted.extremal.eval(x).map(fmt_real).unwrap_or_default();
            vec![fmt_real(x), fmt_real(full.extremal.values[i]), g]
        })
        .collect();
    out.csv("poincare_extremals.csv", csv_table(&["x", "g_full", "g_restricted"], &rows));
    let report = PoincareReport {
        spec: &cfg.spec,
        value,
        restricted: rstar,
        sigma2: d.variance(),
        full,
        restricted_estimate: restricted,
    };
    out.json("poincare.json", &report)?;
    Ok(out)
}

#[derive(Serialize)]
struct TelescopingSummary {
    function: String,
    n: usize,
    s_n: f64,
    sum_t: f64,
    t: Vec<f64>,
    t_bounds: Vec<f64>,
    lower_bound: f64,
    recursion_error: f64,
    nodes: usize,
    t_bounds_hold: bool,
    eq8_holds: bool,
}

#[derive(Serialize)]
struct PropMainRow {
    function: String,
    report: PropMainReport,
}

#[derive(Serialize)]
struct ProjectReport<'a> {
    spec: &'a DistributionSpec,
    seed: u64,
    functions: Vec<TestFunction>,
    pythagoras_gaps: Vec<f64>,
    prop_main: Vec<PropMainRow>,
    telescoping: Vec<TelescopingSummary>,
}

fn project(cfg: &RunConfig) -> Result<Outcome> {
    let d = standardize(&materialize(&cfg.spec, &cfg.grid)?)?;
    let bank = TestFunction::bank(cfg.seed);
    let betas = cfg.beta.map(|b| vec![b]).unwrap_or_else(|| vec![0.0, 0.5, 1.0]);
    let zero = TestFunction::Linear { slope: 0.0 };
    let ns: Vec<usize> = cfg
        .n_set
        .iter()
        .map(|n| *n as usize)
        .filter(|n| (2..=MAX_TELESCOPING_N).contains(n))
        .collect();
    let mut out = Outcome::default();
    let mut gaps = Vec::new();
    let mut prop_rows = Vec::new();
    let mut tele = Vec::new();
    for f in &bank {
        let name = f.name();
        let proj = additive_projection(f, &d, &d)?;
        let gap = proj.pythagoras_gap();
        let tol = cfg.tol("pythagoras") * proj.f_norm_sq.max(1.0);
        out.checks.push(check(format!("pythagoras {name}"), pass_fail(gap <= tol), format!("gap {}", fmt_real(gap))));
        gaps.push(gap);
        for &beta in &betas {
            let r = prop_main_check(f, &d, &d, &zero, &zero, beta)?;
            let status = if r.vacuous { Status::Vacuous } else { pass_fail(r.holds) };
            out.checks.push(check(
                format!("prop_main {name} beta={}", fmt_real(beta)),
                status,
                format!("slack {}", fmt_real(r.slack)),
            ));
            prop_rows.push(PropMainRow { function: name.clone(), report: r });
        }
        for &n in &ns {
            let r = telescoping_decomposition(f, &d, n)?;
            let sum_ok = r.sum_gap() < cfg.tol("telescoping_sum");
            out.checks.push(check(
                format!("telescoping {name} n={n}"),
                pass_fail(sum_ok && r.t_bounds_hold() && r.eq8_holds()),
                format!("|s_n - sum t| {}, s_n {}, bound {}", fmt_real(r.sum_gap()), fmt_real(r.s[n - 1]), fmt_real(r.lower_bound_lhs)),
            ));
            tele.push(TelescopingSummary {
                function: name.clone(),
                n,
                s_n: r.s[n - 1],
                sum_t: r.t.iter().sum(),
                t_bounds_hold: r.t_bounds_hold(),
                eq8_holds: r.eq8_holds(),
                t: r.t,
                t_bounds: r.t_bounds,
                lower_bound: r.lower_bound_lhs,
                recursion_error: r.recursion_error,
                nodes: r.nodes,
            });
        }
    }
    let prop_csv: Vec<Vec<String>> = prop_rows
        .iter()
        .map(|p| {
            let r = &p.report;
            vec![p.function.clone(), fmt_real(r.beta), fmt_real(r.lhs), fmt_real(r.rhs), fmt_real(r.slack), r.holds.to_string()]
        })
        .collect();
    out.csv("project_prop_main.csv", csv_table(&["function", "beta", "lhs", "rhs", "slack", "holds"], &prop_csv));
    let tele_csv: Vec<Vec<String>> = tele
        .iter()
        .map(|t| {
            vec![
                t.function.clone(),
                t.n.to_string(),
                fmt_real(t.s_n),
                fmt_real(t.sum_t),
                fmt_real(t.lower_bound),
                t.t_bounds_hold.to_string(),
                t.eq8_holds.to_string(),
            ]
        })
        .collect();
    out.csv(
        "project_telescoping.csv",
        csv_table(&["function", "n", "s_n", "sum_t", "lower_bound", "t_bounds_hold", "eq8_holds"], &tele_csv),
    );
    let report = ProjectReport {
        spec: &cfg.spec,
        seed: cfg.seed,
        functions: bank,
        pythagoras_gaps: gaps,
        prop_main: prop_rows,
        telescoping: tele,
    };
    out.json("project.json", &report)?;
    Ok(out)
}

fn debruijn(cfg: &RunConfig) -> Result<Outcome> {
    let d = materialize(&cfg.spec, &cfg.grid)?;
    let p = debruijn_entropy(&d, DEFAULT_NODES, DEFAULT_CLIP)?;
    let mut out = Outcome::default();
    out.checks.push(check(
        "debruijn_vs_direct",
        pass_fail(p.relative_gap() < cfg.tol("debruijn_gap")),
        format!(
            "D_integral {}, D_direct {}, relative gap {}",
            fmt_real(p.d_integral),
            fmt_real(p.d_direct),
            fmt_real(p.relative_gap())
        ),
    ));
    out.checks.push(check(
        "path_non_increasing",
        pass_fail(p.max_increase() <= 1e-6),
        format!("largest increase {}", fmt_real(p.max_increase())),
    ));
    out.csv("debruijn.csv", p.to_csv());
    out.json("debruijn.json", &p)?;
    Ok(out)
}

#[derive(Serialize)]
struct VerifyReport {
    sweep: SweepReport,
    two_fold: TwoFoldReport,
    skewness: SkewnessReport,
    doubling: DoublingReport,
    tails: TailClassReport,
}

fn verify(cfg: &RunConfig) -> Result<Outcome> {
    let max_n = *cfg.n_set.last().unwrap_or(&1);
    let k_max = 31 - max_n.leading_zeros();
    let sweep = verify_o1n(&cfg.spec, &cfg.n_set, &cfg.grid)?;
    let two_fold = verify_two_fold(&cfg.spec, &cfg.grid)?;
    let skew = skewness_floor(&cfg.spec, &cfg.n_set, &cfg.grid)?;
    let doubling = monotone_doubling(&cfg.spec, k_max, &cfg.grid)?;
    let tails = tail_class_profile(&cfg.spec, &cfg.n_set, &cfg.radii, &cfg.grid)?;

    let mut out = Outcome { checks: sweep_checks(&sweep), ..Outcome::default() };
    out.checks.push(check(
        "two_fold",
        two_fold.status(),
        format!(
            "J2 {} <= {} ; intermediate {} >= {}",
            fmt_real(two_fold.j2),
            fmt_real(two_fold.bound),
            fmt_real(two_fold.intermediate_lhs),
            fmt_real(two_fold.intermediate_rhs)
        ),
    ));
    out.checks.push(check(
        "skewness_floor",
        pass_fail(skew.holds()),
        format!("s^2/3 = {}, nJ above it: {}", fmt_real(skew.asymptote), skew.nj_above_asymptote),
    ));
    let doubling_status = match doubling.first_finite {
        None => Status::Vacuous,
        Some(_) => pass_fail(doubling.holds()),
    };
    let first = doubling.first_finite.map(|m| m.to_string()).unwrap_or_else(|| "none".into());
    out.checks.push(check("monotone_doubling", doubling_status, format!("first finite at n = {first}")));
    out.checks.push(check(
        "tail_class",
        pass_fail(tails.holds()),
        format!("envelope decays: {}", tails.envelope_decays),
    ));
    out.csv("verify.csv", sweep.to_csv());
    out.csv("verify_tails.csv", tails.to_csv());
    out.json("verify.json", &VerifyReport { sweep, two_fold, skewness: skew, doubling, tails })?;
    Ok(out)
}
