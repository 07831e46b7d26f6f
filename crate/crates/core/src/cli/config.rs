//! Run configuration from a file and command-line flags.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use super::output::Format;
use super::CliError;
use crate::gamma::GKind;
use crate::model::{validate_params, ModelParams};
use crate::variants::{AsymRates, AttentionBounds, MiddleAction};

macro_rules! keys {
    ($( $field:ident = $name:literal : $help:literal ),* $(,)?) => {
        /// Every configuration key, one flag each.
        #[derive(Debug, Clone, Default, clap::Args)]
        pub struct KeyArgs {
            $(
                #[arg(long = $name, value_name = "VALUE", allow_hyphen_values = true, help = $help)]
                pub $field: Option<String>,
            )*
        }

        /// All accepted configuration keys.
        pub const KEYS: &[&str] = &[$($name),*];

        impl KeyArgs {
            /// Flags that were given, by key.
            pub fn to_map(&self) -> BTreeMap<String, String> {
                let mut m = BTreeMap::new();
                $( if let Some(v) = &self.$field { m.insert($name.to_string(), v.clone()); } )*
                m
            }
        }
    };
}

keys! {
    u_rr = "uRR": "payoff of r in state R",
    u_ll = "uLL": "payoff of l in state L",
    u_lr = "uLR": "payoff of l in state R",
    u_rl = "uRL": "payoff of r in state L",
    lambda = "lambda": "arrival rate of full attention",
    rho = "rho": "discount rate",
    c = "c": "flow cost of attention",
    variant = "variant": "baseline | nonexclusive | asymmetric | gamma | multiaction",
    alpha_max = "alpha_max": "upper attention bound (nonexclusive)",
    lambda_r = "lambda_R": "rate of R-evidence (asymmetric)",
    lambda_l = "lambda_L": "rate of L-evidence (asymmetric)",
    g = "g": "attention technology: linear | sqrt (gamma)",
    middles = "middles": "middle actions `uR:uL,uR:uL` (multiaction)",
    grid = "grid": "number of grid beliefs on [0,1] (default 2001)",
    dt = "dt": "period length",
    seed = "seed": "random seed (default 0)",
    n_paths = "n_paths": "number of simulated paths",
    p0 = "p0": "prior belief",
    paths_out = "paths_out": "per-path CSV file (simulate)",
    t_end = "t_end": "last snapshot time (population)",
    times = "times": "comma-separated snapshot times (population)",
    truth = "truth": "true state L | R (population)",
    init = "init": "uniform | normal:MEAN:SD | point:X | nodes:x:d,x:d",
    n_cells = "n_cells": "number of initial cells (population)",
    n_lambda = "n_lambda": "frontier points in the oracle menu (gamma)",
    key = "key": "swept key (sweep)",
    from = "from": "first swept value",
    to = "to": "last swept value",
    steps = "steps": "number of swept values",
    periods = "periods": "number of periods (twoperiod)",
    out = "out": "output file",
    format = "format": "csv | json",
}

const MODEL_KEYS: [&str; 7] = ["uRR", "uLL", "uLR", "uRL", "lambda", "rho", "c"];

/// Model variant with its own parameters.
#[derive(Debug, Clone, PartialEq)]
pub enum Variant {
    Baseline,
    Nonexclusive(AttentionBounds),
    Asymmetric(AsymRates),
    Gamma(GKind),
    Multiaction(Vec<MiddleAction>),
}

impl Variant {
    pub fn name(&self) -> &'static str {
        match self {
            Variant::Baseline => "baseline",
            Variant::Nonexclusive(_) => "nonexclusive",
            Variant::Asymmetric(_) => "asymmetric",
            Variant::Gamma(_) => "gamma",
            Variant::Multiaction(_) => "multiaction",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
struct Entry {
    value: String,
    line: Option<usize>,
}

/// Fully resolved configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub params: ModelParams,
    pub variant: Variant,
    pub out: Option<PathBuf>,
    pub format: Format,
    entries: BTreeMap<String, Entry>,
}

impl RunConfig {
    /// Raw value of a key, as given.
    pub fn raw(&self, key: &str) -> Option<&str> {
        self.entries.get(key).map(|e| e.value.as_str())
    }

    /// Every key that was set, with its raw value, sorted by key.
    pub fn resolved(&self) -> impl Iterator<Item = (&str, &str)> {
        self.entries.iter().map(|(k, e)| (k.as_str(), e.value.as_str()))
    }

    fn parse_err(&self, key: &str, msg: impl Into<String>) -> CliError {
        CliError::parse(key, self.entries.get(key).and_then(|e| e.line), msg)
    }

    pub fn f64_opt(&self, key: &str) -> Result<Option<f64>, CliError> {
        self.raw(key).map(|v| parse_f64(v).map_err(|m| self.parse_err(key, m))).transpose()
    }

    pub fn f64_or(&self, key: &str, default: f64) -> Result<f64, CliError> {
        Ok(self.f64_opt(key)?.unwrap_or(default))
    }

    pub fn u64_or(&self, key: &str, default: u64) -> Result<u64, CliError> {
        match self.raw(key) {
            None => Ok(default),
            Some(v) => v.trim().parse().map_err(|_| self.parse_err(key, format!("expected a non-negative integer, got `{v}`"))),
        }
    }

    pub fn usize_or(&self, key: &str, default: usize) -> Result<usize, CliError> {
        Ok(self.u64_or(key, default as u64)? as usize)
    }

    pub fn required(&self, key: &str) -> Result<&str, CliError> {
        self.raw(key).ok_or_else(|| CliError::parse(key, None, "missing required key"))
    }

    /// A copy with one numeric key replaced, re-validated.
    pub fn with_value(&self, key: &str, value: f64) -> Result<RunConfig, CliError> {
        let mut entries: BTreeMap<String, String> =
            self.entries.iter().map(|(k, e)| (k.clone(), e.value.clone())).collect();
        entries.insert(key.to_string(), super::output::fmt17(value));
        resolve(entries.into_iter().map(|(k, v)| (k, Entry { value: v, line: None })).collect())
    }
}

fn parse_f64(v: &str) -> Result<f64, String> {
    v.trim().parse::<f64>().map_err(|_| format!("expected a number, got `{v}`"))
}

/// Reads a config file: a flat JSON object (a nested `"config"` object takes
/// precedence, so JSON output can be fed back in) or `key = value` lines.
pub fn read_config_file(path: &Path) -> Result<BTreeMap<String, (String, Option<usize>)>, CliError> {
    let text = fs::read_to_string(path)?;
    if text.trim_start().starts_with('{') {
        parse_json_config(&text)
    } else {
        parse_kv_config(&text)
    }
}

fn check_key(key: &str, line: Option<usize>) -> Result<(), CliError> {
    if KEYS.contains(&key) {
        Ok(())
    } else {
        Err(CliError::parse(key, line, "unknown key"))
    }
}

pub fn parse_kv_config(text: &str) -> Result<BTreeMap<String, (String, Option<usize>)>, CliError> {
    let mut out = BTreeMap::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| CliError::parse(line, Some(i + 1), "expected `key = value`"))?;
        let k = k.trim();
        check_key(k, Some(i + 1))?;
        out.insert(k.to_string(), (v.trim().to_string(), Some(i + 1)));
    }
    Ok(out)
}

pub fn parse_json_config(text: &str) -> Result<BTreeMap<String, (String, Option<usize>)>, CliError> {
    let root: serde_json::Value =
        serde_json::from_str(text).map_err(|e| CliError::parse("<json>", Some(e.line()), e.to_string()))?;
    let obj = root
        .get("config")
        .unwrap_or(&root)
        .as_object()
        .ok_or_else(|| CliError::parse("<json>", None, "expected an object"))?;
    let mut out = BTreeMap::new();
    for (k, v) in obj {
        check_key(k, None)?;
        let s = match v {
            serde_json::Value::String(s) => s.clone(),
            serde_json::Value::Number(n) => n.to_string(),
            serde_json::Value::Bool(b) => b.to_string(),
            _ => return Err(CliError::parse(k, None, "expected a string or number")),
        };
        out.insert(k.clone(), (s, None));
    }
    Ok(out)
}

/// File values overridden by flags, then validated.
pub fn parse_config(file: Option<&Path>, flags: &BTreeMap<String, String>) -> Result<RunConfig, CliError> {
    let mut entries: BTreeMap<String, Entry> = match file {
        Some(p) => read_config_file(p)?
            .into_iter()
            .map(|(k, (value, line))| (k, Entry { value, line }))
            .collect(),
        None => BTreeMap::new(),
    };
    for (k, v) in flags {
        check_key(k, None)?;
        entries.insert(k.clone(), Entry { value: v.clone(), line: None });
    }
    resolve(entries)
}

fn resolve(entries: BTreeMap<String, Entry>) -> Result<RunConfig, CliError> {
    let get = |k: &str| -> Result<f64, CliError> {
        let e = entries.get(k).ok_or_else(|| CliError::parse(k, None, "missing required key"))?;
        parse_f64(&e.value).map_err(|m| CliError::parse(k, e.line, m))
    };
    let mut vals = [0.0; 7];
    for (slot, k) in vals.iter_mut().zip(MODEL_KEYS) {
        *slot = get(k)?;
    }
    let params = ModelParams::new(vals[0], vals[1], vals[2], vals[3], vals[4], vals[5], vals[6]);
    let breaches = validate_params(&params);
    if !breaches.is_empty() {
        let msg = breaches.iter().map(|b| b.to_string()).collect::<Vec<_>>().join("; ");
        return Err(CliError::Validation(msg));
    }

    let name = entries.get("variant").map_or("baseline", |e| e.value.as_str());
    let needs: &[&str] = match name {
        "baseline" => &[],
        "nonexclusive" => &["alpha_max"],
        "asymmetric" => &["lambda_R", "lambda_L"],
        "gamma" => &["g"],
        "multiaction" => &["middles"],
        other => return Err(CliError::parse("variant", entries.get("variant").and_then(|e| e.line), format!("unknown variant `{other}`"))),
    };
    let mut breaches = Vec::new();
    for k in ["alpha_max", "lambda_R", "lambda_L", "g", "middles"] {
        let present = entries.contains_key(k);
        if needs.contains(&k) && !present {
            return Err(CliError::parse(k, None, format!("missing required key for variant {name}")));
        }
        if !needs.contains(&k) && present {
            breaches.push(format!("{k} is not used by variant {name}"));
        }
    }
    if !breaches.is_empty() {
        return Err(CliError::Validation(breaches.join("; ")));
    }

    let variant = match name {
        "nonexclusive" => {
            let b = AttentionBounds::symmetric(get("alpha_max")?);
            b.validate()?;
            Variant::Nonexclusive(b)
        }
        "asymmetric" => {
            let r = AsymRates { lambda_r: get("lambda_R")?, lambda_l: get("lambda_L")? };
            r.validate()?;
            Variant::Asymmetric(r)
        }
        "gamma" => {
            let e = &entries["g"];
            Variant::Gamma(match e.value.trim() {
                "linear" => GKind::Linear,
                "sqrt" => GKind::Sqrt,
                v => return Err(CliError::parse("g", e.line, format!("expected linear or sqrt, got `{v}`"))),
            })
        }
        "multiaction" => {
            let e = &entries["middles"];
            let middles = parse_middles(&e.value).map_err(|m| CliError::parse("middles", e.line, m))?;
            for m in &middles {
                m.validate(&params)?;
            }
            Variant::Multiaction(middles)
        }
        _ => Variant::Baseline,
    };

    let format = match entries.get("format").map(|e| (e.value.trim(), e.line)) {
        None | Some(("csv", _)) => Format::Csv,
        Some(("json", _)) => Format::Json,
        Some((v, line)) => return Err(CliError::parse("format", line, format!("expected csv or json, got `{v}`"))),
    };
    let out = entries.get("out").map(|e| PathBuf::from(&e.value));
    Ok(RunConfig { params, variant, out, format, entries })
}

/// `uR:uL,uR:uL,…`
pub fn parse_middles(s: &str) -> Result<Vec<MiddleAction>, String> {
    s.split(',')
        .filter(|t| !t.trim().is_empty())
        .map(|t| {
            let (r, l) = t.split_once(':').ok_or_else(|| format!("expected `uR:uL`, got `{t}`"))?;
            Ok(MiddleAction { u_m_r: parse_f64(r)?, u_m_l: parse_f64(l)? })
        })
        .collect::<Result<Vec<_>, String>>()
        .and_then(|v| if v.is_empty() { Err("no middle actions given".into()) } else { Ok(v) })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn flags(pairs: &[(&str, &str)]) -> BTreeMap<String, String> {
        pairs.iter().map(|(k, v)| (k.to_string(), v.to_string())).collect()
    }

    const BASE: [(&str, &str); 7] =
        [("uRR", "1"), ("uLL", ".9"), ("uLR", "-.9"), ("uRL", "-.9"), ("lambda", "1"), ("rho", "0"), ("c", ".3")];

    #[test]
    fn flags_give_a_baseline_config() {
        let cfg = parse_config(None, &flags(&BASE)).unwrap();
        assert_eq!(cfg.variant, Variant::Baseline);
        assert_eq!(cfg.params.u_ll, 0.9);
    }

    #[test]
    fn missing_key_is_named() {
        let err = parse_config(None, &flags(&BASE[..6])).unwrap_err();
        assert!(matches!(err, CliError::Parse { ref key, .. } if key == "c"));
    }

    #[test]
    fn kv_file_reports_line() {
        let err = parse_kv_config("uRR = 1\n\nbogus = 2\n").unwrap_err();
        assert!(matches!(err, CliError::Parse { ref key, line: Some(3), .. } if key == "bogus"));
    }

    #[test]
    fn negative_cost_fails_validation() {
        let mut f = flags(&BASE);
        f.insert("c".into(), "-1".into());
        let err = parse_config(None, &f).unwrap_err();
        assert!(matches!(err, CliError::Validation(ref m) if m.contains("c ≥ 0")));
        assert_eq!(err.exit_code(), 2);
    }

    #[test]
    fn stray_variant_key_rejected() {
        let mut f = flags(&BASE);
        f.insert("alpha_max".into(), ".8".into());
        assert!(matches!(parse_config(None, &f), Err(CliError::Validation(_))));
    }
}
