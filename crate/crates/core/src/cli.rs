//! Configuration-driven front end.
//!
//! A config file is flat `key = value` text. Keys may sit at the top level
//! or under a `[section]` named after the experiment kind; `#` starts a
//! comment. Unknown, duplicate and conflicting keys are errors, and all
//! problems are reported together. Every run writes `<out>.csv` and
//! `<out>.json`; the JSON embeds the resolved config with all defaults.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value as Json};

use crate::boltzmann_process::{circling_fraction_mc, green_kubo_delayed_mc, green_kubo_mc};
use crate::error::{Error, Result};
use crate::geometry::PlanarPoint;
use crate::kinetic_solver::{
    cosine_density, hilbert_residual_study, homogeneous_harmonic, solve, KineticParams, SpectralGrid,
};
use crate::lorentz_sim::{event_rate_study, msd_estimate, EtaRule};
use crate::medium::{empty_annulus_probability_mc, scaling_from};
use crate::operators::{build_lg, diffusion_coefficient, operator_sweep, period_from_field};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentKind {
    Msd,
    ScalingStudy,
    GreenKubo,
    OperatorSweep,
    Kinetic,
    Hilbert,
    Circling,
}

impl ExperimentKind {
    pub const ALL: [ExperimentKind; 7] = [
        ExperimentKind::Msd,
        ExperimentKind::ScalingStudy,
        ExperimentKind::GreenKubo,
        ExperimentKind::OperatorSweep,
        ExperimentKind::Kinetic,
        ExperimentKind::Hilbert,
        ExperimentKind::Circling,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ExperimentKind::Msd => "msd",
            ExperimentKind::ScalingStudy => "scaling-study",
            ExperimentKind::GreenKubo => "green-kubo",
            ExperimentKind::OperatorSweep => "operator-sweep",
            ExperimentKind::Kinetic => "kinetic",
            ExperimentKind::Hilbert => "hilbert",
            ExperimentKind::Circling => "circling",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|k| k.name() == name)
    }

    fn schema(self) -> Vec<KeySpec> {
        use Check::*;
        use Fallback::*;
        use Ty::*;
        let k = |name, ty, default, check| KeySpec { name, ty, default, check };
        let eta_keys = || {
            vec![
                k("eta", Float, Optional, AtLeastOne),
                k("eta_coeff", Float, Optional, Positive),
                k("eta_exponent", Float, Optional, NonNegative),
            ]
        };
        let grid_keys = || {
            vec![
                k("l_box", Float, Value("6.283185307179586"), Positive),
                k("n_x", Int, Value("1"), Any),
                k("n_v", Int, Value("64"), Any),
                k("amplitude", Float, Value("0.5"), NonNegative),
            ]
        };
        let mut keys = match self {
            ExperimentKind::Msd => {
                let mut v = vec![
                    k("eps", Float, Required, Positive),
                    k("mu", Float, Value("1"), Positive),
                    k("B", Float, Value("0"), NonNegative),
                    k("replicas", Int, Value("200"), Positive),
                    k("t_end", Float, Required, Positive),
                    k("n_times", Int, Value("20"), Positive),
                    k("seed", Int, Required, Any),
                ];
                v.extend(eta_keys());
                v
            }
            ExperimentKind::ScalingStudy => {
                let mut v = vec![
                    k("eps_list", List, Required, Positive),
                    k("mu", Float, Value("1"), Positive),
                    k("B", Float, Value("1"), NonNegative),
                    k("t_end", Float, Value("5"), Positive),
                    k("replicas", Int, Value("1000"), Positive),
                    k("seed", Int, Required, Any),
                ];
                v.extend(eta_keys());
                v
            }
            ExperimentKind::GreenKubo => vec![
                k("mu", Float, Value("1"), Positive),
                k("T", Float, Optional, Positive),
                k("B", Float, Optional, NonNegative),
                k("paths", Int, Value("100000"), Positive),
                k("t_cut", Float, Value("12"), Positive),
                k("dt_quad", Float, Value("0.01"), Positive),
                k("process", Choice(&["generator", "delayed"]), Value("generator"), Any),
                k("modes", Int, Value("64"), Positive),
                k("quadrature_order", Int, Value("256"), Positive),
                k("seed", Int, Required, Any),
            ],
            ExperimentKind::OperatorSweep => vec![
                k("mu", Float, Value("1"), Positive),
                k("b_min", Float, Value("0"), NonNegative),
                k("b_max", Float, Value("8.1"), NonNegative),
                k("b_step", Float, Value("0.1"), Positive),
                k("modes", Int, Value("64"), Positive),
                k("quadrature_order", Int, Value("256"), Positive),
            ],
            ExperimentKind::Kinetic => {
                let mut v = vec![
                    k("mu", Float, Value("1"), Positive),
                    k("B", Float, Value("0"), NonNegative),
                    k("eta", Float, Value("1"), AtLeastOne),
                    k("t_end", Float, Value("1"), Positive),
                    k("dt", Float, Optional, Positive),
                    k("include_memory", Bool, Value("true"), Any),
                    k("initial", Choice(&["cosine", "harmonic"]), Value("cosine"), Any),
                    k("harmonic", Int, Value("1"), Positive),
                    k("n_diagnostics", Int, Value("20"), Positive),
                    k("quadrature_order", Int, Value("256"), Positive),
                ];
                v.extend(grid_keys());
                v
            }
            ExperimentKind::Hilbert => {
                let mut v = vec![
                    k("mu", Float, Value("1"), Positive),
                    k("B", Float, Value("1"), NonNegative),
                    k("eta_list", List, Value("4, 8, 16"), AtLeastOne),
                    k("t_probe", Float, Value("0.5"), Positive),
                    k("quadrature_order", Int, Value("256"), Positive),
                ];
                v.extend(grid_keys());
                v
            }
            ExperimentKind::Circling => vec![
                k("mu", Float, Value("1"), Positive),
                k("R", Float, Value("1"), Positive),
                k("eps", Float, Value("0.01"), Positive),
                k("eta", Float, Value("1"), AtLeastOne),
                k("samples", Int, Value("100000"), Positive),
                k("paths", Int, Value("100000"), Positive),
                k("seed", Int, Required, Any),
            ],
        };
        keys.push(k("experiment", Text, Optional, Any));
        keys
    }
}

#[derive(Clone, Copy, Debug)]
enum Ty {
    Float,
    Int,
    Bool,
    List,
    Text,
    Choice(&'static [&'static str]),
}

#[derive(Clone, Copy, Debug)]
enum Fallback {
    Required,
    Optional,
    Value(&'static str),
}

#[derive(Clone, Copy, Debug)]
enum Check {
    Any,
    Positive,
    NonNegative,
    AtLeastOne,
}

#[derive(Clone, Copy, Debug)]
struct KeySpec {
    name: &'static str,
    ty: Ty,
    default: Fallback,
    check: Check,
}

/// A resolved config value.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ConfigValue {
    Bool(bool),
    Int(u64),
    Float(f64),
    List(Vec<f64>),
    Text(String),
}

impl ConfigValue {
    fn render(&self) -> String {
        match self {
            ConfigValue::Bool(b) => b.to_string(),
            ConfigValue::Int(i) => i.to_string(),
            ConfigValue::Float(x) => format!("{x:?}"),
            ConfigValue::List(v) => v.iter().map(|x| format!("{x:?}")).collect::<Vec<_>>().join(", "),
            ConfigValue::Text(s) => s.clone(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub kind: ExperimentKind,
    pub values: BTreeMap<String, ConfigValue>,
}

impl ExperimentConfig {
    pub fn float(&self, key: &str) -> f64 {
        match self.values.get(key) {
            Some(ConfigValue::Float(x)) => *x,
            Some(ConfigValue::Int(i)) => *i as f64,
            other => panic!("config key {key} is not a float: {other:?}"),
        }
    }

    pub fn float_opt(&self, key: &str) -> Option<f64> {
        self.values.contains_key(key).then(|| self.float(key))
    }

    pub fn int(&self, key: &str) -> u64 {
        match self.values.get(key) {
            Some(ConfigValue::Int(i)) => *i,
            other => panic!("config key {key} is not an integer: {other:?}"),
        }
    }

    pub fn usize(&self, key: &str) -> usize {
        self.int(key) as usize
    }

    pub fn list(&self, key: &str) -> Vec<f64> {
        match self.values.get(key) {
            Some(ConfigValue::List(v)) => v.clone(),
            other => panic!("config key {key} is not a list: {other:?}"),
        }
    }

    pub fn flag(&self, key: &str) -> bool {
        matches!(self.values.get(key), Some(ConfigValue::Bool(true)))
    }

    pub fn text(&self, key: &str) -> &str {
        match self.values.get(key) {
            Some(ConfigValue::Text(s)) => s,
            other => panic!("config key {key} is not text: {other:?}"),
        }
    }

    /// The config as accepted text; validating it gives back `self`.
    pub fn to_text(&self) -> String {
        let mut out = format!("experiment = {}\n\n[{}]\n", self.kind.name(), self.kind.name());
        for (k, v) in &self.values {
            if k != "experiment" {
                let _ = writeln!(out, "{k} = {}", v.render());
            }
        }
        out
    }

    pub fn to_json(&self) -> Json {
        serde_json::to_value(self).expect("config serializes")
    }

    pub fn from_json(value: &Json) -> Result<Self> {
        Ok(serde_json::from_value(value.clone())?)
    }

    /// `η` rule for kinds that take `eps`.
    pub fn eta_rule(&self) -> EtaRule {
        match (self.float_opt("eta_coeff"), self.float_opt("eta_exponent")) {
            (Some(coeff), Some(exponent)) => EtaRule::Power { coeff, exponent },
            _ => EtaRule::Fixed(self.float_opt("eta").unwrap_or(1.0)),
        }
    }
}

fn parse_value(spec: &KeySpec, raw: &str) -> std::result::Result<ConfigValue, String> {
    let float = |s: &str| -> std::result::Result<f64, String> {
        let x: f64 = s.trim().parse().map_err(|_| format!("`{s}` is not a number"))?;
        if !x.is_finite() {
            return Err(format!("`{s}` is not finite"));
        }
        Ok(x)
    };
    let checked = |x: f64| -> std::result::Result<f64, String> {
        let ok = match spec.check {
            Check::Any => true,
            Check::Positive => x > 0.0,
            Check::NonNegative => x >= 0.0,
            Check::AtLeastOne => x >= 1.0,
        };
        if ok {
            Ok(x)
        } else {
            let need = match spec.check {
                Check::Positive => "positive",
                Check::NonNegative => "non-negative",
                Check::AtLeastOne => "at least 1",
                Check::Any => "",
            };
            Err(format!("must be {need}, got {x}"))
        }
    };
    match spec.ty {
        Ty::Float => Ok(ConfigValue::Float(checked(float(raw)?)?)),
        Ty::Int => {
            let i: u64 = raw.parse().map_err(|_| format!("`{raw}` is not a non-negative integer"))?;
            checked(i as f64)?;
            Ok(ConfigValue::Int(i))
        }
        Ty::Bool => match raw {
            "true" => Ok(ConfigValue::Bool(true)),
            "false" => Ok(ConfigValue::Bool(false)),
            _ => Err(format!("`{raw}` is not true/false")),
        },
        Ty::List => {
            let v = raw
                .split(',')
                .map(|s| float(s).and_then(checked))
                .collect::<std::result::Result<Vec<_>, _>>()?;
            if v.is_empty() {
                return Err("list is empty".into());
            }
            Ok(ConfigValue::List(v))
        }
        Ty::Text => Ok(ConfigValue::Text(raw.to_string())),
        Ty::Choice(options) => {
            if options.contains(&raw) {
                Ok(ConfigValue::Text(raw.to_string()))
            } else {
                Err(format!("`{raw}` is not one of {}", options.join(", ")))
            }
        }
    }
}

/// Parses and validates config text. `expected` is the subcommand, if any;
/// otherwise the `experiment` key decides the kind.
pub fn validate(text: &str, expected: Option<ExperimentKind>) -> Result<ExperimentConfig> {
    let mut errors = Vec::new();
    let mut entries: Vec<(usize, Option<String>, String, String)> = Vec::new();
    let mut section: Option<String> = None;
    for (n, line) in text.lines().enumerate() {
        let line_no = n + 1;
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        if let Some(rest) = line.strip_prefix('[') {
            match rest.strip_suffix(']') {
                Some(name) => section = Some(name.trim().to_string()),
                None => errors.push(format!("line {line_no}: malformed section header")),
            }
            continue;
        }
        match line.split_once('=') {
            Some((k, v)) if !k.trim().is_empty() => {
                entries.push((line_no, section.clone(), k.trim().to_string(), v.trim().to_string()))
            }
            _ => errors.push(format!("line {line_no}: expected `key = value`")),
        }
    }

    let declared = entries
        .iter()
        .find(|(_, _, k, _)| k == "experiment")
        .map(|(_, _, _, v)| v.clone());
    let kind = match (expected, declared.as_deref()) {
        (Some(k), None) => Some(k),
        (Some(k), Some(d)) if d == k.name() => Some(k),
        (Some(k), Some(d)) => {
            errors.push(format!("experiment = {d} does not match subcommand {}", k.name()));
            Some(k)
        }
        (None, Some(d)) => match ExperimentKind::from_name(d) {
            Some(k) => Some(k),
            None => {
                errors.push(format!("unknown experiment kind `{d}`"));
                None
            }
        },
        (None, None) => {
            errors.push("missing key `experiment`".into());
            None
        }
    };
    let Some(kind) = kind else {
        return Err(Error::Config(errors));
    };

    let schema = kind.schema();
    let mut values = BTreeMap::new();
    let mut seen = std::collections::BTreeSet::new();
    for (line_no, sect, key, value) in &entries {
        if let Some(s) = sect {
            if s != kind.name() {
                errors.push(format!("line {line_no}: section [{s}] does not match experiment {}", kind.name()));
                continue;
            }
        }
        let Some(spec) = schema.iter().find(|s| s.name == key) else {
            errors.push(format!("line {line_no}: unknown key `{key}` for {}", kind.name()));
            continue;
        };
        if !seen.insert(key.as_str()) {
            errors.push(format!("line {line_no}: duplicate key `{key}`"));
            continue;
        }
        match parse_value(spec, value) {
            Ok(v) => {
                values.insert(key.clone(), v);
            }
            Err(e) => errors.push(format!("line {line_no}: `{key}` {e}")),
        }
    }
    // conflicts and defaults
    let has = |k: &str| values.contains_key(k);
    if has("eta") && (has("eta_coeff") || has("eta_exponent")) {
        errors.push("conflict: `eta` given together with the rule `eta_coeff`/`eta_exponent`".into());
    }
    if has("eta_coeff") != has("eta_exponent") {
        errors.push("the η rule needs both `eta_coeff` and `eta_exponent`".into());
    }
    if has("T") && has("B") {
        errors.push("conflict: give either `T` or `B`, not both".into());
    }
    for spec in &schema {
        if values.contains_key(spec.name) || seen.contains(spec.name) {
            continue;
        }
        match spec.default {
            Fallback::Required => errors.push(format!("missing required key `{}`", spec.name)),
            Fallback::Optional => {}
            Fallback::Value(v) => {
                values.insert(spec.name.to_string(), parse_value(spec, v).expect("valid default"));
            }
        }
    }
    let eta_rule_keys = schema.iter().any(|s| s.name == "eta_coeff");
    if eta_rule_keys && !has_any(&values, &["eta", "eta_coeff", "eta_exponent"]) {
        values.insert("eta".into(), ConfigValue::Float(1.0));
    }
    values.insert("experiment".into(), ConfigValue::Text(kind.name().into()));
    let config = ExperimentConfig { kind, values };
    errors.extend(semantic_checks(&config));
    if errors.is_empty() {
        Ok(config)
    } else {
        Err(Error::Config(errors))
    }
}

fn has_any(values: &BTreeMap<String, ConfigValue>, keys: &[&str]) -> bool {
    keys.iter().any(|k| values.contains_key(*k))
}

fn semantic_checks(c: &ExperimentConfig) -> Vec<String> {
    let mut errors = Vec::new();
    let present = |k: &str| c.values.contains_key(k);
    if present("eps") && c.float("eps") >= 1.0 {
        errors.push("`eps` must be below 1".into());
    }
    if present("eps_list") {
        let v = c.list("eps_list");
        if v.iter().any(|&e| e >= 1.0) || v.windows(2).any(|w| w[1] >= w[0]) {
            errors.push("`eps_list` must be strictly decreasing values in (0, 1)".into());
        }
    }
    if present("eta_list") && c.list("eta_list").windows(2).any(|w| w[1] <= w[0]) {
        errors.push("`eta_list` must be strictly increasing".into());
    }
    if present("n_v") {
        let n = c.int("n_v");
        if n < 8 || n % 2 != 0 {
            errors.push(format!("`n_v` must be even and at least 8, got {n}"));
        }
    }
    if c.kind == ExperimentKind::OperatorSweep && c.float("b_max") < c.float("b_min") {
        errors.push("`b_max` must not be below `b_min`".into());
    }
    if c.kind == ExperimentKind::Circling && c.float("R") <= c.float("eps") {
        errors.push("`R` must exceed `eps`".into());
    }
    if c.kind == ExperimentKind::GreenKubo && c.float("dt_quad") > c.float("t_cut") {
        errors.push("`dt_quad` must not exceed `t_cut`".into());
    }
    errors
}

/// CSV table with a one-line header and 17 significant digits.
#[derive(Clone, Debug, PartialEq)]
pub struct Table {
    pub header: Vec<&'static str>,
    pub rows: Vec<Vec<f64>>,
}

impl Table {
    pub fn to_csv(&self) -> String {
        let mut out = self.header.join(",");
        out.push('\n');
        for row in &self.rows {
            let cells: Vec<String> = row.iter().map(|x| format!("{x:.16e}")).collect();
            out.push_str(&cells.join(","));
            out.push('\n');
        }
        out
    }
}

#[derive(Clone, Debug)]
pub struct RunOutput {
    pub table: Table,
    pub results: Json,
}

fn se_json(m: &crate::stats::MeanSe) -> Json {
    json!({ "mean": m.mean, "std_error": m.std_error, "n": m.n })
}

/// Runs an experiment without touching the filesystem.
pub fn execute(config: &ExperimentConfig) -> Result<RunOutput> {
    let c = config;
    match c.kind {
        ExperimentKind::Msd => {
            let eps = c.float("eps");
            let eta = c.eta_rule().eta(eps);
            let params = scaling_from(eps, c.float("mu"), eta, c.float("B"))?;
            let n = c.usize("n_times");
            let t_end = c.float("t_end");
            let grid: Vec<f64> = (0..=n).map(|k| t_end * k as f64 / n as f64).collect();
            let table = msd_estimate(&params, c.usize("replicas"), &grid, c.int("seed"))?;
            let rows = table
                .rows
                .iter()
                .map(|r| vec![r.t, r.msd, r.msd_se, r.circling_frac])
                .collect();
            let late: Vec<&crate::lorentz_sim::MsdRow> =
                table.rows.iter().filter(|r| r.t >= 0.5 * t_end && r.t > 0.0).collect();
            let slope = crate::stats::linear_fit(
                &late.iter().map(|r| r.t).collect::<Vec<_>>(),
                &late.iter().map(|r| r.msd).collect::<Vec<_>>(),
            );
            Ok(RunOutput {
                table: Table {
                    header: vec!["t", "msd", "msd_se", "circling_frac"],
                    rows,
                },
                results: json!({
                    "eta": eta,
                    "replicas_used": table.replicas_used,
                    "replicas_aborted": table.replicas_aborted,
                    "trapped_fraction": table.trapped_fraction,
                    "late_slope_over_4": slope.map(|f| f.slope / 4.0),
                    "warnings": params.warnings(),
                }),
            })
        }
        ExperimentKind::ScalingStudy => {
            let study = event_rate_study(
                &c.list("eps_list"),
                &c.eta_rule(),
                c.float("mu"),
                c.float("B"),
                c.float("t_end"),
                c.usize("replicas"),
                c.int("seed"),
            )?;
            let rows = study
                .rows
                .iter()
                .map(|r| {
                    vec![
                        r.eps,
                        r.eta,
                        r.recollision.mean,
                        r.recollision.std_error,
                        r.interference.mean,
                        r.interference.std_error,
                        r.daisy.mean,
                        r.daisy.std_error,
                        r.circling.mean,
                        r.circling.std_error,
                        r.circling_closed_form.unwrap_or(f64::NAN),
                        r.replicas_aborted as f64,
                    ]
                })
                .collect();
            Ok(RunOutput {
                table: Table {
                    header: vec![
                        "eps",
                        "eta",
                        "p_recollision",
                        "p_recollision_se",
                        "p_interference",
                        "p_interference_se",
                        "p_daisy",
                        "p_daisy_se",
                        "p_circling",
                        "p_circling_se",
                        "circling_closed_form",
                        "replicas_aborted",
                    ],
                    rows,
                },
                results: json!({
                    "recollision_fit": study.recollision_fit,
                    "interference_fit": study.interference_fit,
                    "daisy_fit": study.daisy_fit,
                }),
            })
        }
        ExperimentKind::GreenKubo => {
            let mu = c.float("mu");
            let period = match (c.float_opt("T"), c.float_opt("B")) {
                (Some(t), _) => t,
                (None, Some(b)) => period_from_field(b),
                (None, None) => 1.0,
            };
            let args = (mu, period, c.usize("paths"), c.float("t_cut"), c.float("dt_quad"), c.int("seed"));
            let est = if c.text("process") == "delayed" {
                green_kubo_delayed_mc(args.0, args.1, args.2, args.3, args.4, args.5)?
            } else {
                green_kubo_mc(args.0, args.1, args.2, args.3, args.4, args.5)?
            };
            let op = build_lg(mu, period, c.usize("modes"), None, c.usize("quadrature_order"))?;
            let d_op = diffusion_coefficient(&op)?;
            let rows = est.vacf.iter().map(|&(t, m, s)| vec![t, m, s]).collect();
            Ok(RunOutput {
                table: Table {
                    header: vec!["t", "vacf", "vacf_se"],
                    rows,
                },
                results: json!({
                    "period": period,
                    "d_mc": est.d_mc,
                    "d_mc_se": est.d_mc_se,
                    "d_operator": d_op,
                    "deviation_in_se": (est.d_mc - d_op) / est.d_mc_se,
                    "circling_frac": est.circling_frac,
                    "n_paths": est.n_paths,
                }),
            })
        }
        ExperimentKind::OperatorSweep => {
            let (lo, hi, step) = (c.float("b_min"), c.float("b_max"), c.float("b_step"));
            let n = ((hi - lo) / step + 1e-9).floor() as usize;
            let fields: Vec<f64> = (0..=n).map(|i| lo + step * i as f64).collect();
            let sweep = operator_sweep(c.float("mu"), &fields, c.usize("modes"), c.usize("quadrature_order"))?;
            let rows = sweep
                .iter()
                .map(|r| {
                    vec![
                        r.b_field,
                        r.period,
                        r.d_direct,
                        r.d_markovian,
                        r.d_memory,
                        if r.series_converged { 1.0 } else { 0.0 },
                        r.spectral_gap,
                    ]
                })
                .collect();
            let threshold = crate::operators::invertibility_threshold();
            Ok(RunOutput {
                table: Table {
                    header: vec![
                        "B",
                        "T",
                        "d_direct",
                        "d_markovian",
                        "d_memory",
                        "series_converged",
                        "spectral_gap",
                    ],
                    rows,
                },
                results: json!({ "threshold": threshold }),
            })
        }
        ExperimentKind::Kinetic => {
            let grid = SpectralGrid::new(c.usize("n_x"), c.usize("n_v"), c.float("l_box"))?;
            let mut params = KineticParams::new(c.float("mu"), c.float("B"), c.float("eta"))?;
            params.include_memory = c.flag("include_memory");
            params.quadrature_order = c.usize("quadrature_order");
            let f0 = match c.text("initial") {
                "harmonic" => homogeneous_harmonic(grid, c.int("harmonic") as u32, c.float("amplitude")),
                _ => cosine_density(grid, c.float("amplitude")),
            };
            let dt = c.float_opt("dt");
            let out = solve(&params, &f0, c.float("t_end"), dt, c.usize("n_diagnostics"), false)?;
            let rows = out
                .diagnostics
                .iter()
                .map(|d| vec![d.t, d.mass, d.dist_to_avg, d.dist_to_heat])
                .collect();
            let mass0 = out.diagnostics[0].mass;
            let drift = out
                .diagnostics
                .iter()
                .map(|d| (d.mass - mass0).abs())
                .fold(0.0, f64::max);
            Ok(RunOutput {
                table: Table {
                    header: vec!["t", "mass", "dist_to_avg", "dist_to_heat"],
                    rows,
                },
                results: json!({
                    "heat_diffusivity": out.heat_diffusivity,
                    "circling_fraction": out.circling_fraction,
                    "dt_kinetic": out.dt_kinetic,
                    "steps": out.steps,
                    "max_mass_drift": drift,
                    "conjugate_defect": out.final_field.conjugate_defect(),
                }),
            })
        }
        ExperimentKind::Hilbert => {
            let grid = SpectralGrid::new(c.usize("n_x"), c.usize("n_v"), c.float("l_box"))?;
            let etas = c.list("eta_list");
            let mut params = KineticParams::new(c.float("mu"), c.float("B"), etas[0])?;
            params.quadrature_order = c.usize("quadrature_order");
            let f0 = cosine_density(grid, c.float("amplitude"));
            let rows = hilbert_residual_study(&etas, &params, &f0, c.float("t_probe"))?;
            let decreasing = rows.windows(2).all(|w| w[1].dist_heat < w[0].dist_heat);
            let corrected = rows.iter().all(|r| r.dist_hilbert1 < r.dist_heat);
            Ok(RunOutput {
                table: Table {
                    header: vec!["eta", "dist_heat", "dist_hilbert1"],
                    rows: rows.iter().map(|r| vec![r.eta, r.dist_heat, r.dist_hilbert1]).collect(),
                },
                results: json!({
                    "heat_diffusivity": params.heat_diffusivity()?,
                    "dist_heat_decreasing": decreasing,
                    "corrector_improves": corrected,
                }),
            })
        }
        ExperimentKind::Circling => {
            let (mu, r, eps, eta) = (c.float("mu"), c.float("R"), c.float("eps"), c.float("eta"));
            let params = scaling_from(eps, mu, eta, 1.0 / r)?;
            let seed = c.int("seed");
            let geo = empty_annulus_probability_mc(
                &params,
                PlanarPoint::new(0.0, 0.0),
                c.usize("samples"),
                crate::seeding::derive_seed(seed, 0),
            )?;
            let period = params.larmor_period.unwrap_or(f64::INFINITY);
            let proc = circling_fraction_mc(mu, period, c.usize("paths"), crate::seeding::derive_seed(seed, 1))?;
            let proc_closed = crate::operators::memory_ratio(mu, period);
            Ok(RunOutput {
                table: Table {
                    header: vec!["route", "estimate", "std_error", "closed_form", "samples"],
                    rows: vec![
                        vec![0.0, geo.estimate, geo.std_error, geo.closed_form, geo.n_samples as f64],
                        vec![1.0, proc.mean, proc.std_error, proc_closed, proc.n as f64],
                    ],
                },
                results: json!({
                    "routes": ["annulus", "process"],
                    "annulus": { "estimate": geo.estimate, "std_error": geo.std_error, "closed_form": geo.closed_form },
                    "process": { "estimate": se_json(&proc), "closed_form": proc_closed, "period": period },
                }),
            })
        }
    }
}

/// Full JSON summary for a run.
pub fn summary_json(config: &ExperimentConfig, output: &RunOutput) -> Json {
    json!({
        "toolkit": "maglorentz",
        "version": VERSION,
        "experiment": config.kind.name(),
        "config": config.to_json(),
        "results": output.results,
    })
}

fn with_suffix(prefix: &Path, suffix: &str) -> PathBuf {
    let mut s = prefix.as_os_str().to_owned();
    s.push(suffix);
    PathBuf::from(s)
}

/// Runs and writes `<prefix>.csv` and `<prefix>.json`. Files appear only
/// after the whole computation succeeded (temporary file, then rename).
pub fn run(config: &ExperimentConfig, prefix: &Path) -> Result<(PathBuf, PathBuf)> {
    let output = execute(config)?;
    let csv = with_suffix(prefix, ".csv");
    let js = with_suffix(prefix, ".json");
    if let Some(parent) = prefix.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent)?;
    }
    let summary = serde_json::to_string_pretty(&summary_json(config, &output))? + "\n";
    let csv_tmp = with_suffix(prefix, ".csv.tmp");
    let js_tmp = with_suffix(prefix, ".json.tmp");
    let write = || -> Result<()> {
        fs::write(&csv_tmp, output.table.to_csv())?;
        fs::write(&js_tmp, &summary)?;
        fs::rename(&csv_tmp, &csv)?;
        fs::rename(&js_tmp, &js)?;
        Ok(())
    };
    if let Err(e) = write() {
        let _ = fs::remove_file(&csv_tmp);
        let _ = fs::remove_file(&js_tmp);
        return Err(e);
    }
    Ok((csv, js))
}

#[derive(Parser, Debug)]
#[command(name = "maglorentz", version, about = "Magnetic Lorentz gas experiments")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(clap::Args, Debug, Clone)]
pub struct RunArgs {
    /// Config file (`key = value` lines).
    #[arg(long)]
    pub config: PathBuf,
    /// Output prefix; writes `<out>.csv` and `<out>.json`.
    #[arg(long)]
    pub out: PathBuf,
    /// Worker threads (0 = all cores). Results do not depend on it.
    #[arg(long, default_value_t = 0)]
    pub workers: usize,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Mean squared displacement of the mechanical model.
    Msd(RunArgs),
    /// Recollision, interference, daisy and circling rates across ε.
    ScalingStudy(RunArgs),
    /// Green–Kubo Monte Carlo versus the operator diffusion coefficient.
    GreenKubo(RunArgs),
    /// Diffusion coefficient over a range of fields.
    OperatorSweep(RunArgs),
    /// Kinetic solve with mass and distance diagnostics.
    Kinetic(RunArgs),
    /// Distances to the heat solution and its first Hilbert correction across η.
    Hilbert(RunArgs),
    /// Circling probability by the annulus and process routes.
    Circling(RunArgs),
}

impl Command {
    pub fn split(&self) -> (ExperimentKind, &RunArgs) {
        match self {
            Command::Msd(a) => (ExperimentKind::Msd, a),
            Command::ScalingStudy(a) => (ExperimentKind::ScalingStudy, a),
            Command::GreenKubo(a) => (ExperimentKind::GreenKubo, a),
            Command::OperatorSweep(a) => (ExperimentKind::OperatorSweep, a),
            Command::Kinetic(a) => (ExperimentKind::Kinetic, a),
            Command::Hilbert(a) => (ExperimentKind::Hilbert, a),
            Command::Circling(a) => (ExperimentKind::Circling, a),
        }
    }
}

/// Parses arguments, runs, and returns the process exit status.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    let (kind, args) = cli.command.split();
    let text = match fs::read_to_string(&args.config) {
        Ok(t) => t,
        Err(e) => {
            eprintln!("error: cannot read {}: {e}", args.config.display());
            return 2;
        }
    };
    let config = match validate(&text, Some(kind)) {
        Ok(c) => c,
        Err(Error::Config(list)) => {
            for e in list {
                eprintln!("config error: {e}");
            }
            return 2;
        }
        Err(e) => {
            eprintln!("config error: {e}");
            return 2;
        }
    };
    let pool = match rayon::ThreadPoolBuilder::new().num_threads(args.workers).build() {
        Ok(p) => p,
        Err(e) => {
            eprintln!("error: {e}");
            return 1;
        }
    };
    match pool.install(|| run(&config, &args.out)) {
        Ok((csv, js)) => {
            println!("wrote {} and {}", csv.display(), js.display());
            0
        }
        Err(e) => {
            eprintln!("error: {e}");
            1
        }
    }
}
