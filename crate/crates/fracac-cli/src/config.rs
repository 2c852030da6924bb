//! Plain-text `key = value` run configurations.

use anyhow::{anyhow, bail, Context, Result};
use fracac::estimator::DEFAULT_BUDGET;
use fracac::tree::{MotionKind, MotionSpec};
use fracac::voting::{InitialCondition, SchemeKind, VoteScheme};
use fracac::{ModelParams, ScalingPreset};
use sha2::{Digest, Sha256};
use std::collections::BTreeMap;
use std::fmt::Write as _;

/// A fully resolved configuration: the command, its seed and worker count,
/// and every command parameter as text.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RunConfig {
    pub command: String,
    pub seed: u64,
    pub workers: usize,
    pub values: BTreeMap<String, String>,
}

impl RunConfig {
    pub fn new(command: &str, seed: u64, defaults: &[(&str, &str)]) -> Self {
        RunConfig {
            command: command.to_string(),
            seed,
            workers: 1,
            values: defaults.iter().map(|(k, v)| (k.to_string(), v.to_string())).collect(),
        }
    }

    pub fn render(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "command = {}", self.command);
        let _ = writeln!(out, "seed = {}", self.seed);
        let _ = writeln!(out, "workers = {}", self.workers);
        for (k, v) in &self.values {
            let _ = writeln!(out, "{k} = {v}");
        }
        out
    }

    /// Inverse of `render`; blank lines and `#` comments are ignored.
    pub fn parse(text: &str) -> Result<Self> {
        let mut command = None;
        let mut seed = None;
        let mut workers = 1;
        let mut values = BTreeMap::new();
        for (no, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (k, v) = line.split_once('=').ok_or_else(|| anyhow!("line {}: expected key = value", no + 1))?;
            let (k, v) = (k.trim(), v.trim());
            match k {
                "command" => command = Some(v.to_string()),
                "seed" => seed = Some(v.parse().with_context(|| format!("line {}: bad seed", no + 1))?),
                "workers" => workers = v.parse().with_context(|| format!("line {}: bad workers", no + 1))?,
                _ => {
                    if values.insert(k.to_string(), v.to_string()).is_some() {
                        bail!("line {}: duplicate key '{k}'", no + 1);
                    }
                }
            }
        }
        Ok(RunConfig {
            command: command.ok_or_else(|| anyhow!("config has no command"))?,
            seed: seed.ok_or_else(|| anyhow!("config has no seed"))?,
            workers,
            values,
        })
    }

    /// Overlay `other`'s values; every key must already exist here.
    pub fn merge(&mut self, other: &RunConfig) -> Result<()> {
        if other.command != self.command {
            bail!("config is for '{}', not '{}'", other.command, self.command);
        }
        for (k, v) in &other.values {
            match self.values.get_mut(k) {
                Some(slot) => *slot = v.clone(),
                None => bail!("unknown key '{k}' for {}", self.command),
            }
        }
        self.seed = other.seed;
        self.workers = other.workers;
        Ok(())
    }

    /// SHA-256 of the rendered config without the worker count, which never
    /// changes results.
    pub fn hash(&self) -> String {
        let canon = RunConfig { workers: 0, ..self.clone() }.render();
        Sha256::digest(canon.as_bytes()).iter().map(|b| format!("{b:02x}")).collect()
    }

    pub fn str(&self, key: &str) -> Result<&str> {
        self.values.get(key).map(String::as_str).ok_or_else(|| anyhow!("missing key '{key}'"))
    }

    pub fn f64(&self, key: &str) -> Result<f64> {
        self.str(key)?.parse().with_context(|| format!("'{key}' is not a number"))
    }

    pub fn u64(&self, key: &str) -> Result<u64> {
        let s = self.str(key)?;
        // Accept 1e5-style counts.
        if let Ok(v) = s.parse::<u64>() {
            return Ok(v);
        }
        let f: f64 = s.parse().with_context(|| format!("'{key}' is not a count"))?;
        if f < 0.0 || f.fract() != 0.0 {
            bail!("'{key}' is not a count");
        }
        Ok(f as u64)
    }

    pub fn usize(&self, key: &str) -> Result<usize> {
        Ok(self.u64(key)? as usize)
    }

    pub fn f64_list(&self, key: &str) -> Result<Vec<f64>> {
        let s = self.str(key)?;
        if s.is_empty() {
            return Ok(Vec::new());
        }
        s.split(',')
            .map(|x| x.trim().parse::<f64>().with_context(|| format!("'{key}': bad entry '{x}'")))
            .collect()
    }

    pub fn preset(&self) -> Result<ScalingPreset> {
        Ok(ScalingPreset::parse(self.str("preset")?)?)
    }

    pub fn params(&self) -> Result<ModelParams> {
        Ok(ModelParams::new(self.f64("alpha")?, self.f64("epsilon")?, self.preset()?)?)
    }

    pub fn motion(&self) -> Result<MotionSpec> {
        let kind = MotionKind::parse(self.str("motion")?)?;
        Ok(MotionSpec::new(kind, self.usize("dim")?).with_resolution(self.f64("resolution_ratio")?))
    }

    pub fn scheme(&self, params: &ModelParams) -> Result<VoteScheme> {
        let kind = SchemeKind::parse(self.str("scheme")?)?;
        Ok(VoteScheme::new(kind, parse_initial(self.str("initial")?, params)?))
    }

    pub fn budget(&self) -> Result<u64> {
        match self.values.get("budget") {
            Some(_) => self.u64("budget"),
            None => Ok(DEFAULT_BUDGET),
        }
    }
}

/// `step`, `hat`, `const:<c>` or `ball:<r0>`.
pub fn parse_initial(s: &str, params: &ModelParams) -> Result<InitialCondition> {
    let s = s.trim();
    let ic = match s.split_once(':') {
        None if s == "step" => InitialCondition::step(),
        None if s == "hat" => InitialCondition::hat(params)?,
        Some(("const", c)) => InitialCondition::constant(c.trim().parse()?),
        Some(("ball", r)) => InitialCondition::ball(r.trim().parse()?),
        _ => bail!("unknown initial condition '{s}' (step, hat, const:<c>, ball:<r0>)"),
    };
    ic.validate()?;
    Ok(ic)
}
