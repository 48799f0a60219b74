//! Run configuration: a JSON file merged with command-line flags.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};
use fisher_clt::harness::{smoothed_discrete, DEFAULT_N_SET, DEFAULT_RADII};
use fisher_clt::{DistributionSpec, Family, GridSpec};
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use crate::cli::{CommandKind, Format, RunArgs};

pub const DEFAULT_SEED: u64 = 7;

/// Tolerances a run may override, with defaults.
pub const TOLERANCES: [(&str, f64); 3] = [("debruijn_gap", 1e-2), ("telescoping_sum", 1e-5), ("pythagoras", 1e-8)];

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    pub points: Option<usize>,
    pub domain_halfwidth: Option<f64>,
    pub domain: Option<(f64, f64)>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    pub dir: Option<PathBuf>,
    pub formats: Option<Vec<Format>>,
}

/// The file schema. Every field is optional; `spec` is a family object
/// such as `{"family": "gamma", "shape": 5, "center_and_scale": true}`.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub command: Option<CommandKind>,
    pub spec: Option<Map<String, Value>>,
    #[serde(default)]
    pub grid: GridConfig,
    pub n_set: Option<Vec<u32>>,
    pub radii: Option<Vec<f64>>,
    #[serde(default)]
    pub tolerances: BTreeMap<String, f64>,
    #[serde(default)]
    pub output: OutputConfig,
    pub tau: Option<f64>,
    pub beta: Option<f64>,
    pub seed: Option<u64>,
    pub threads: Option<usize>,
}

/// Fully resolved run.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunConfig {
    pub command: CommandKind,
    pub spec: DistributionSpec,
    pub grid: GridSpec,
    pub n_set: Vec<u32>,
    pub radii: Vec<f64>,
    pub tolerances: BTreeMap<String, f64>,
    pub out_dir: Option<PathBuf>,
    pub formats: Vec<Format>,
    pub beta: Option<f64>,
    pub seed: u64,
    pub threads: Option<usize>,
}

impl RunConfig {
    pub fn tol(&self, name: &str) -> f64 {
        self.tolerances[name]
    }

    pub fn wants(&self, f: Format) -> bool {
        self.formats.contains(&f)
    }
}

pub fn load_file(path: &Path) -> Result<FileConfig> {
    let text = fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
    serde_json::from_str(&text).with_context(|| format!("parsing config {}", path.display()))
}

fn parse_scalar(s: &str) -> Result<Value> {
    match s {
        "true" => return Ok(Value::Bool(true)),
        "false" => return Ok(Value::Bool(false)),
        _ => {}
    }
    if s.contains(':') {
        let items = s.split(':').map(parse_number).collect::<Result<Vec<_>>>()?;
        return Ok(Value::Array(items));
    }
    parse_number(s)
}

fn parse_number(s: &str) -> Result<Value> {
    let v: f64 = s.trim().parse().map_err(|_| anyhow!("not a number: {s:?}"))?;
    serde_json::Number::from_f64(v).map(Value::Number).ok_or_else(|| anyhow!("not a finite number: {s:?}"))
}

/// `k=v,...` pairs.
pub fn parse_pairs(s: &str) -> Result<Vec<(String, String)>> {
    s.split(',')
        .filter(|p| !p.trim().is_empty())
        .map(|p| {
            let (k, v) = p.split_once('=').ok_or_else(|| anyhow!("expected key=value, got {p:?}"))?;
            Ok((k.trim().to_string(), v.trim().to_string()))
        })
        .collect()
}

fn parse_domain(s: &str) -> Result<(f64, f64)> {
    let parts: Vec<&str> = s.split(',').collect();
    let num = |t: &str| t.trim().parse::<f64>().map_err(|_| anyhow!("bad domain value {t:?}"));
    match parts.as_slice() {
        [w] => {
            let w = num(w)?;
            Ok((-w, w))
        }
        [lo, hi] => Ok((num(lo)?, num(hi)?)),
        _ => bail!("domain must be `lo,hi` or a half-width"),
    }
}

/// Turns a family object into a spec. Aliases: `exp`, `mixture`,
/// `two_bump`; `discrete` takes `atoms`, `weights` and a smoothing `tau`.
pub fn spec_from_object(mut obj: Map<String, Value>, tau: Option<f64>) -> Result<DistributionSpec> {
    let name = obj
        .get("family")
        .and_then(Value::as_str)
        .ok_or_else(|| anyhow!("missing family"))?
        .to_string();
    let standardize = match obj.remove("center_and_scale") {
        Some(Value::Bool(b)) => b,
        None => false,
        Some(other) => bail!("center_and_scale must be a boolean, got {other}"),
    };
    let floats = |obj: &Map<String, Value>, key: &str| -> Result<Vec<f64>> {
        let v = obj.get(key).ok_or_else(|| anyhow!("discrete family needs {key}"))?;
        let list = match v {
            Value::Array(a) => a.clone(),
            single => vec![single.clone()],
        };
        list.iter().map(|x| x.as_f64().ok_or_else(|| anyhow!("{key} must be numbers"))).collect()
    };
    let mut spec = match name.as_str() {
        "two_bump" if obj.len() == 1 => Family::two_bump().spec(),
        "discrete" => {
            let tau = tau
                .or_else(|| obj.get("tau").and_then(Value::as_f64))
                .ok_or_else(|| anyhow!("discrete family needs tau"))?;
            smoothed_discrete(&floats(&obj, "atoms")?, &floats(&obj, "weights")?, tau)?
        }
        _ => {
            let canonical = match name.as_str() {
                "exp" => "exponential",
                "mixture" | "two_bump" => "gaussian_mixture",
                other => other,
            };
            obj.insert("family".into(), Value::String(canonical.into()));
            let family: Family =
                serde_json::from_value(Value::Object(obj)).with_context(|| format!("parameters of family {name}"))?;
            family.validate()?;
            family.spec()
        }
    };
    spec.center_and_scale = standardize;
    Ok(spec)
}

/// Merges the optional config file with the flags; flags win.
pub fn resolve(command: CommandKind, args: &RunArgs) -> Result<RunConfig> {
    let file = match &args.config {
        Some(p) => load_file(p)?,
        None => FileConfig::default(),
    };
    if let Some(c) = file.command {
        if c != command {
            bail!("config is for command {c:?}, invoked as {command:?}");
        }
    }

    let mut obj = match (&args.family, file.spec) {
        (Some(f), Some(mut spec)) if spec.get("family").and_then(Value::as_str) == Some(f.as_str()) => {
            spec.insert("family".into(), Value::String(f.clone()));
            spec
        }
        (Some(f), _) => {
            let mut m = Map::new();
            m.insert("family".into(), Value::String(f.clone()));
            m
        }
        (None, Some(spec)) => spec,
        (None, None) => bail!("no distribution given: pass --family or a config with spec"),
    };
    if let Some(p) = &args.params {
        for (k, v) in parse_pairs(p)? {
            obj.insert(k, parse_scalar(&v)?);
        }
    }
    let named = [
        ("shape", args.shape),
        ("scale", args.scale),
        ("rate", args.rate),
        ("mean", args.mean),
        ("var", args.var),
        ("loc", args.loc),
    ];
    for (k, v) in named {
        if let Some(v) = v {
            obj.insert(k.into(), parse_number(&v.to_string())?);
        }
    }
    if args.standardize {
        obj.insert("center_and_scale".into(), Value::Bool(true));
    }
    let tau = args.tau.or(file.tau);
    let spec = spec_from_object(obj, tau)?;

    let points = args.grid_points.or(file.grid.points).unwrap_or(fisher_clt::family::DEFAULT_POINTS);
    let domain = match &args.domain {
        Some(s) => Some(parse_domain(s)?),
        None => file.grid.domain.or(file.grid.domain_halfwidth.map(|w| (-w, w))),
    };
    if let Some((lo, hi)) = domain {
        if !(lo < hi) {
            bail!("empty domain [{lo}, {hi}]");
        }
    }
    let grid = GridSpec { points, domain };

    let n_set = args.n.clone().or(file.n_set).unwrap_or_else(|| DEFAULT_N_SET.to_vec());
    if n_set.is_empty() || n_set[0] == 0 || n_set.windows(2).any(|w| w[0] >= w[1]) {
        bail!("n values must be strictly increasing positive integers");
    }
    let radii = args.radii.clone().or(file.radii).unwrap_or_else(|| DEFAULT_RADII.to_vec());

    let mut tolerances: BTreeMap<String, f64> = TOLERANCES.iter().map(|(k, v)| (k.to_string(), *v)).collect();
    let mut overrides: Vec<(String, f64)> = file.tolerances.into_iter().collect();
    if let Some(t) = &args.tol {
        for (k, v) in parse_pairs(t)? {
            overrides.push((k, v.parse().map_err(|_| anyhow!("tolerance {v:?} is not a number"))?));
        }
    }
    for (k, v) in overrides {
        if !tolerances.contains_key(&k) {
            bail!("unknown tolerance {k:?}; known: {}", TOLERANCES.map(|t| t.0).join(", "));
        }
        if !(v > 0.0) || !v.is_finite() {
            bail!("tolerance {k} must be positive, got {v}");
        }
        tolerances.insert(k, v);
    }

    let beta = args.beta.or(file.beta);
    if let Some(b) = beta {
        if !(0.0..=1.0).contains(&b) {
            bail!("beta must lie in [0, 1], got {b}");
        }
    }
    let threads = args.threads.or(file.threads);
    if threads == Some(0) {
        bail!("threads must be positive");
    }
    let mut formats = args.format.clone().or(file.output.formats).unwrap_or_else(|| vec![Format::Csv, Format::Json]);
    formats.dedup();

    Ok(RunConfig {
        command,
        spec,
        grid,
        n_set,
        radii,
        tolerances,
        out_dir: args.out.clone().or(file.output.dir),
        formats,
        beta,
        seed: args.seed.or(file.seed).unwrap_or(DEFAULT_SEED),
        threads,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn args(family: &str) -> RunArgs {
        RunArgs { family: Some(family.into()), ..RunArgs::default() }
    }

    #[test]
    fn flags_build_specs() {
        let mut a = args("gamma");
        a.shape = Some(5.0);
        a.standardize = true;
        let c = resolve(CommandKind::Verify, &a).unwrap();
        assert_eq!(c.spec, Family::gamma(5.0).standardized());
        assert_eq!(c.n_set, DEFAULT_N_SET.to_vec());
        assert_eq!(c.tol("debruijn_gap"), 1e-2);
    }

    #[test]
    fn list_params_and_aliases() {
        let mut a = args("mixture");
        a.params = Some("weights=0.5:0.5,means=-1:1,vars=0.5:0.5".into());
        assert_eq!(resolve(CommandKind::Info, &a).unwrap().spec, Family::two_bump().spec());
        assert_eq!(resolve(CommandKind::Info, &args("two_bump")).unwrap().spec, Family::two_bump().spec());
        let mut d = args("discrete");
        d.params = Some("atoms=-1:1,weights=0.5:0.5".into());
        d.tau = Some(0.25);
        let c = resolve(CommandKind::Sweep, &d).unwrap();
        assert!(matches!(c.spec.family, Family::GaussianMixture { .. }));
    }

    #[test]
    fn bad_inputs_are_rejected() {
        assert!(resolve(CommandKind::Info, &RunArgs::default()).is_err());
        let mut a = args("gamma");
        assert!(resolve(CommandKind::Info, &a).is_err());
        a.shape = Some(3.0);
        a.tol = Some("debruijn_gap=-1".into());
        assert!(resolve(CommandKind::Info, &a).is_err());
        a.tol = Some("nonsense=1".into());
        assert!(resolve(CommandKind::Info, &a).is_err());
        a.tol = None;
        a.domain = Some("3,1".into());
        assert!(resolve(CommandKind::Info, &a).is_err());
    }

    #[test]
    fn domain_forms() {
        assert_eq!(parse_domain("6").unwrap(), (-6.0, 6.0));
        assert_eq!(parse_domain("-1,40").unwrap(), (-1.0, 40.0));
        assert!(parse_domain("1,2,3").is_err());
    }
}
