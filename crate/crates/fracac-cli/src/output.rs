//! In-memory command results and the files they become.

use crate::config::RunConfig;
use serde_json::{json, Value};

pub const TOOL: &str = "fracac";
pub const VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Clone, Debug, PartialEq)]
pub struct Check {
    pub name: String,
    pub pass: bool,
    pub detail: String,
}

impl Check {
    pub fn new(name: impl Into<String>, pass: bool, detail: impl Into<String>) -> Self {
        Check { name: name.into(), pass, detail: detail.into() }
    }

    pub fn line(&self) -> String {
        format!("{} {}: {}", if self.pass { "PASS" } else { "FAIL" }, self.name, self.detail)
    }
}

/// Everything a command produced. `files` excludes the manifest, which is
/// derived from the rest by [`CommandOutput::finish`].
#[derive(Clone, Debug, Default, PartialEq)]
pub struct CommandOutput {
    pub files: Vec<(String, Vec<u8>)>,
    pub checks: Vec<Check>,
}

impl CommandOutput {
    pub fn all_pass(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }

    pub fn add_file(&mut self, name: impl Into<String>, bytes: Vec<u8>) {
        self.files.push((name.into(), bytes));
    }

    /// Appends manifest.json (tool, version, config hash, seed, config and checks).
    pub fn finish(mut self, cfg: &RunConfig) -> Self {
        let manifest = manifest(cfg, &self);
        self.files.push(("manifest.json".into(), manifest));
        self
    }
}

/// First line of every text output; the worker count is deliberately absent.
pub fn header(cfg: &RunConfig) -> String {
    format!("# {TOOL} {VERSION} command={} config_hash={} seed={}\n", cfg.command, cfg.hash(), cfg.seed)
}

pub fn csv(cfg: &RunConfig, columns: &[&str], rows: &[Vec<String>]) -> Vec<u8> {
    let mut out = header(cfg);
    out.push_str(&columns.join(","));
    out.push('\n');
    for r in rows {
        out.push_str(&r.join(","));
        out.push('\n');
    }
    out.into_bytes()
}

pub fn checks_json(checks: &[Check]) -> Value {
    Value::Array(checks.iter().map(|c| json!({"name": c.name, "pass": c.pass, "detail": c.detail})).collect())
}

fn manifest(cfg: &RunConfig, out: &CommandOutput) -> Vec<u8> {
    let config: serde_json::Map<String, Value> =
        cfg.values.iter().map(|(k, v)| (k.clone(), Value::String(v.clone()))).collect();
    let v = json!({
        "tool": TOOL,
        "version": VERSION,
        "command": cfg.command,
        "config_hash": cfg.hash(),
        "seed": cfg.seed,
        "config": config,
        "files": out.files.iter().map(|(n, _)| n.clone()).collect::<Vec<_>>(),
        "checks": checks_json(&out.checks),
        "all_pass": out.all_pass(),
    });
    let mut s = serde_json::to_string_pretty(&v).expect("manifest serializes");
    s.push('\n');
    s.into_bytes()
}

/// Shortest round-trip formatting, so CSVs are byte-stable.
pub fn f(x: f64) -> String {
    format!("{x}")
}
