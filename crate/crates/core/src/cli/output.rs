//! Deterministic CSV and JSON emission.
//!
//! Every number goes through [`fmt17`], so output bytes depend only on the
//! computed `f64` values.

use std::fs;
use std::io::Write;
use std::path::PathBuf;

use serde_json::{Map, Value};

pub use crate::numeric::fmt17;

use super::config::RunConfig;
use super::CliError;

/// Environment variable naming the default output directory.
pub const OUT_DIR_ENV: &str = "ATTENTION_OUT_DIR";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Csv,
    Json,
}

impl Format {
    pub fn ext(self) -> &'static str {
        match self {
            Format::Csv => "csv",
            Format::Json => "json",
        }
    }
}

/// A table cell or header value.
#[derive(Debug, Clone, PartialEq)]
pub enum Val {
    Num(f64),
    Text(String),
    Null,
}

impl Val {
    pub fn text(s: impl Into<String>) -> Self {
        Val::Text(s.into())
    }

    fn csv(&self) -> String {
        match self {
            Val::Num(x) => fmt17(*x),
            Val::Text(s) => s.clone(),
            Val::Null => String::new(),
        }
    }

    pub fn json(&self) -> Value {
        match self {
            Val::Num(x) => num(*x),
            Val::Text(s) => Value::String(s.clone()),
            Val::Null => Value::Null,
        }
    }
}

impl From<f64> for Val {
    fn from(x: f64) -> Self {
        Val::Num(x)
    }
}

impl From<Option<f64>> for Val {
    fn from(x: Option<f64>) -> Self {
        x.map_or(Val::Null, Val::Num)
    }
}

impl From<&str> for Val {
    fn from(s: &str) -> Self {
        Val::Text(s.to_string())
    }
}

/// JSON number written with the same digits as the CSV; non-finite values
/// become strings.
pub fn num(x: f64) -> Value {
    if x.is_finite() {
        Value::Number(serde_json::from_str(&fmt17(x)).expect("fmt17 yields a JSON number"))
    } else {
        Value::String(fmt17(x))
    }
}

/// Header entries plus rows.
#[derive(Debug, Clone, Default)]
pub struct Table {
    pub meta: Vec<(String, Val)>,
    pub columns: Vec<&'static str>,
    pub rows: Vec<Vec<Val>>,
}

impl Table {
    pub fn new(columns: &[&'static str]) -> Self {
        Table { meta: Vec::new(), columns: columns.to_vec(), rows: Vec::new() }
    }

    pub fn meta(&mut self, key: impl Into<String>, v: impl Into<Val>) {
        self.meta.push((key.into(), v.into()));
    }

    pub fn push(&mut self, row: Vec<Val>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }

    /// `# key=value` header lines followed by the CSV body.
    pub fn to_csv(&self, command: &str, cfg: &RunConfig) -> Result<String, CliError> {
        let mut out = format!("# command={command}\n");
        for (k, v) in cfg.resolved() {
            out.push_str(&format!("# config.{k}={v}\n"));
        }
        for (k, v) in &self.meta {
            out.push_str(&format!("# {k}={}\n", v.csv()));
        }
        let mut w = csv::Writer::from_writer(Vec::new());
        let io = |e: csv::Error| CliError::Io(std::io::Error::other(e));
        w.write_record(&self.columns).map_err(io)?;
        for r in &self.rows {
            w.write_record(r.iter().map(Val::csv)).map_err(io)?;
        }
        let body = w.into_inner().map_err(|e| CliError::Io(std::io::Error::other(e.to_string())))?;
        out.push_str(&String::from_utf8(body).expect("csv output is utf-8"));
        Ok(out)
    }

    pub fn to_json(&self, command: &str, cfg: &RunConfig) -> String {
        let mut meta = Map::new();
        for (k, v) in &self.meta {
            meta.insert(k.clone(), v.json());
        }
        let rows: Vec<Value> = self.rows.iter().map(|r| Value::Array(r.iter().map(Val::json).collect())).collect();
        let mut root = envelope(command, cfg);
        root.insert("meta".into(), Value::Object(meta));
        root.insert("columns".into(), Value::Array(self.columns.iter().map(|c| Value::String(c.to_string())).collect()));
        root.insert("rows".into(), Value::Array(rows));
        let mut s = serde_json::to_string(&Value::Object(root)).expect("serializable");
        s.push('\n');
        s
    }
}

/// `command` and the resolved `config`, shared by every JSON artifact.
pub fn envelope(command: &str, cfg: &RunConfig) -> Map<String, Value> {
    let mut config = Map::new();
    for (k, v) in cfg.resolved() {
        config.insert(k.to_string(), Value::String(v.to_string()));
    }
    let mut root = Map::new();
    root.insert("command".into(), Value::String(command.to_string()));
    root.insert("config".into(), Value::Object(config));
    root
}

#[derive(Debug, Clone)]
pub enum Content {
    /// Rendered in the configured format.
    Table(Table),
    /// Always JSON.
    Json(Map<String, Value>),
    /// Always CSV.
    CsvTable(Table),
}

/// One output file. `path: None` marks the main artifact.
#[derive(Debug, Clone)]
pub struct Artifact {
    pub path: Option<PathBuf>,
    pub content: Content,
}

impl Artifact {
    pub fn main(content: Content) -> Self {
        Artifact { path: None, content }
    }

    fn ext(&self, cfg: &RunConfig) -> &'static str {
        match &self.content {
            Content::Table(_) => cfg.format.ext(),
            Content::Json(_) => "json",
            Content::CsvTable(_) => "csv",
        }
    }

    pub fn render(&self, command: &str, cfg: &RunConfig) -> Result<String, CliError> {
        match &self.content {
            Content::Table(t) if cfg.format == Format::Json => Ok(t.to_json(command, cfg)),
            Content::Table(t) | Content::CsvTable(t) => t.to_csv(command, cfg),
            Content::Json(m) => {
                let mut s = serde_json::to_string_pretty(&Value::Object(m.clone())).expect("serializable");
                s.push('\n');
                Ok(s)
            }
        }
    }
}

/// Writes each artifact; the main one goes to `out`, else to
/// `$ATTENTION_OUT_DIR/<command>.<ext>`, else to stdout.
pub fn write_artifacts(command: &str, cfg: &RunConfig, artifacts: &[Artifact]) -> Result<Vec<PathBuf>, CliError> {
    let mut written = Vec::new();
    for a in artifacts {
        let text = a.render(command, cfg)?;
        let dest = match (&a.path, &cfg.out) {
            (Some(p), _) => Some(p.clone()),
            (None, Some(p)) => Some(p.clone()),
            (None, None) => std::env::var_os(OUT_DIR_ENV).map(|d| PathBuf::from(d).join(format!("{command}.{}", a.ext(cfg)))),
        };
        match dest {
            Some(p) => {
                if let Some(dir) = p.parent().filter(|d| !d.as_os_str().is_empty()) {
                    fs::create_dir_all(dir)?;
                }
                fs::write(&p, text)?;
                written.push(p);
            }
            None => std::io::stdout().lock().write_all(text.as_bytes())?,
        }
    }
    Ok(written)
}
