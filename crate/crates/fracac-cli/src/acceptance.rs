//! The acceptance suite: ten criteria with pinned seeds and sizes.

use crate::commands::{defaults, run, DEFAULT_SEED};
use crate::config::RunConfig;
use crate::output::{checks_json, CommandOutput, Check};
use crate::suites::*;
use anyhow::Result;
use fracac::geometry::{CouplingConfig, SphereFlow};
use fracac::{ModelParams, Point, ScalingPreset};
use serde_json::json;
use std::time::Instant;

pub const TITLES: [&str; 10] = [
    "exact algebra",
    "subordinator identities",
    "heat-kernel Lipschitz bound",
    "voting iterate convergence",
    "duality against the spectral oracle",
    "coupled voting systems",
    "one-dimensional interface",
    "shifted-process machinery",
    "macroscopic curvature flow",
    "engineering determinism",
];

/// Every criterion runs from the commands' default seed.
const SEED: u64 = DEFAULT_SEED;

#[derive(Clone, Debug)]
pub struct CriterionResult {
    pub id: usize,
    pub checks: Vec<Check>,
    pub error: Option<String>,
    pub seconds: f64,
}

impl CriterionResult {
    pub fn pass(&self) -> bool {
        self.error.is_none() && self.checks.iter().all(|c| c.pass)
    }

    pub fn title(&self) -> &'static str {
        TITLES[self.id - 1]
    }

    /// `PASS 5 duality against the spectral oracle (3/3 checks)`.
    pub fn line(&self) -> String {
        let ok = self.checks.iter().filter(|c| c.pass).count();
        let tail = match &self.error {
            Some(e) => format!("error: {e}"),
            None => format!("{ok}/{} checks", self.checks.len()),
        };
        format!("{} {} {} ({tail})", if self.pass() { "PASS" } else { "FAIL" }, self.id, self.title())
    }
}

fn set(cfg: &mut RunConfig, kv: &[(&str, &str)]) {
    for (k, v) in kv {
        cfg.values.insert(k.to_string(), v.to_string());
    }
}

fn command_checks(cfg: &RunConfig) -> Result<Vec<Check>> {
    Ok(run(cfg)?.checks)
}

fn with_workers(mut cfg: RunConfig, workers: usize) -> RunConfig {
    cfg.workers = workers;
    cfg
}

pub fn criterion(id: usize, workers: usize) -> CriterionResult {
    let start = Instant::now();
    let res = match id {
        1 => algebra_checks(SEED, 100),
        2 => c2(),
        3 => Ok(heat_kernel_checks(10_000, SEED)),
        4 => iterate_checks(1.5, ScalingPreset::LogExample, &[2, 3, 4]).map(|r| r.1),
        5 => c5(workers),
        6 => defaults("coupling-check").and_then(|c| command_checks(&with_workers(c, workers))),
        7 => c7(workers),
        8 => c8(workers),
        9 => defaults("mcf-track").and_then(|c| command_checks(&c)),
        10 => determinism(),
        _ => Err(anyhow::anyhow!("no criterion {id}")),
    };
    let seconds = start.elapsed().as_secs_f64();
    match res {
        Ok(checks) => CriterionResult { id, checks, error: None, seconds },
        Err(e) => CriterionResult { id, checks: Vec::new(), error: Some(format!("{e:#}")), seconds },
    }
}

fn c2() -> Result<Vec<Check>> {
    let cfg = defaults("subordinator-stats")?;
    let params = cfg.params()?;
    params.u_pm()?;
    let suite = SubordinatorSuite {
        s: cfg.f64("s")?,
        lambdas: cfg.f64_list("lambdas")?,
        qs: cfg.f64_list("qs")?,
        ks: vec![1, 2],
        n: cfg.usize("n")?,
        trunc_scale: 1.0,
        seed: SEED,
    };
    subordinator_checks(&params, &suite)
}

fn c5(workers: usize) -> Result<Vec<Check>> {
    let mut checks = Vec::new();
    for alpha in ["1.5", "2"] {
        let mut cfg = with_workers(defaults("oracle-run")?, workers);
        set(&mut cfg, &[("alpha", alpha)]);
        checks.extend(command_checks(&cfg)?);
    }
    Ok(checks)
}

fn c7(workers: usize) -> Result<Vec<Check>> {
    let params = ModelParams::new(1.7, 0.25, ScalingPreset::PowerExample)?;
    let suite = InterfaceSuite {
        t: 4.0 * 0.25 * 0.25,
        fit_grid: vec![0.0, 0.25, 0.5, 1.0, 1.5, 2.0, 2.5, 3.0, 4.0],
        assert_grid: vec![2.0, 2.5, 3.0, 4.0],
        slope_grid: vec![-1.5, -1.0, -0.5, -0.25, 0.0, 0.25, 0.5, 1.0, 1.5],
        resolution_ratio: 1e-2,
        n_fit: 20_000,
        n: 100_000,
        seed: SEED,
        workers,
    };
    Ok(interface_checks(&params, &suite)?.1)
}

fn c8(workers: usize) -> Result<Vec<Check>> {
    let p = ModelParams::new(1.5, 0.1, ScalingPreset::LogExample)?;
    let mut checks = vec![z_identity_check(&p, 10_000, SEED)?];
    let flow = SphereFlow::new(1.0, 2)?;
    let t = 0.2;
    let r = flow.radius(t)?;
    let cc = CouplingConfig {
        x0: Point::from_slice(&[r + 0.05, 0.0]),
        t,
        k: 1,
        s_grid: vec![0.0, 0.01, 0.02, 0.03, 0.04],
        beta: r / 2.0,
        steps: 32,
        resolution_ratio: 1e-3,
        n: 100_000,
        seed: SEED,
        workers,
    };
    checks.push(sphere_coupling_check(&p, &flow, &cc)?.1);
    let gaps = GapSuite {
        alpha: 1.5,
        preset: ScalingPreset::LogExample,
        epsilons: vec![0.3, 0.2, 0.15],
        t: 0.08,
        l: 1.0,
        sign: -1.0,
        offset: 0.05,
        resolution_ratio: 1e-2,
        n: 100_000,
        seed: SEED,
        workers,
    };
    checks.extend(gap_checks(&gaps)?.1);
    Ok(checks)
}

/// Small configurations of every command, used for the determinism check.
pub fn small_configs() -> Result<Vec<RunConfig>> {
    let mut out = Vec::new();
    let mut add = |cmd: &str, kv: &[(&str, &str)]| -> Result<()> {
        let mut c = defaults(cmd)?;
        set(&mut c, kv);
        out.push(c);
        Ok(())
    };
    add("subordinator-stats", &[("n", "2000"), ("heat_n", "200")])?;
    add("vote-math", &[("trees", "10")])?;
    add("estimate", &[("n", "2000"), ("x", "0,0.5"), ("t", "0.05")])?;
    add("coupling-check", &[("n", "1000"), ("x", "0,0.3")])?;
    add("coupling-check", &[("mode", "sphere"), ("epsilon", "0.1"), ("t", "0.2"), ("n", "400"), ("resolution_ratio", "0.001")])?;
    add("coupling-check", &[("mode", "gronwall"), ("t", "0.08"), ("epsilons", "0.3,0.2"), ("n", "500")])?;
    add(
        "oracle-run",
        &[("half_width", "16"), ("grid_n", "1024"), ("times", "0.045"), ("n", "1000"), ("duality_x", "0,0.5")],
    )?;
    add("mcf-track", &[("grid_n", "64"), ("times", "0.05"), ("control_alpha", "")])?;
    add("assumption-report", &[])?;
    Ok(out)
}

fn determinism() -> Result<Vec<Check>> {
    let mut checks = Vec::new();
    for cfg in small_configs()? {
        let name = match cfg.values.get("mode") {
            Some(m) => format!("{}:{m}", cfg.command),
            None => cfg.command.clone(),
        };
        let runs: Vec<CommandOutput> =
            [1, 4, 8].iter().map(|&w| run(&with_workers(cfg.clone(), w))).collect::<Result<_>>()?;
        let replay = run(&RunConfig::parse(&with_workers(cfg.clone(), 4).render())?.clone())?;
        let same = runs.iter().all(|r| r.files == runs[0].files) && replay.files == runs[0].files;
        let bytes: usize = runs[0].files.iter().map(|(_, b)| b.len()).sum();
        checks.push(Check::new(
            format!("bit-identical-{name}"),
            same,
            format!("{} files, {bytes} bytes; workers 1/4/8 and manifest replay", runs[0].files.len()),
        ));
    }
    Ok(checks)
}

pub fn parse_ids(s: &str) -> Result<Vec<usize>> {
    s.split(',')
        .map(|x| {
            let id: usize = x.trim().parse()?;
            anyhow::ensure!((1..=10).contains(&id), "criterion ids are 1..10, got {id}");
            Ok(id)
        })
        .collect()
}

/// Runs the selected criteria, calling `each` as results arrive.
pub fn run_all(ids: &[usize], workers: usize, mut each: impl FnMut(&CriterionResult)) -> Vec<CriterionResult> {
    ids.iter()
        .map(|&id| {
            let r = criterion(id, workers);
            each(&r);
            r
        })
        .collect()
}

pub fn command(cfg: &RunConfig) -> Result<CommandOutput> {
    let ids = parse_ids(cfg.str("criteria")?)?;
    let results = run_all(&ids, cfg.workers, |r| eprintln!("{}", r.line()));
    let mut out = CommandOutput::default();
    let mut text = String::new();
    for r in &results {
        text.push_str(&r.line());
        text.push('\n');
        for c in &r.checks {
            text.push_str(&format!("    {}\n", c.line()));
        }
    }
    out.add_file("acceptance.txt", text.into_bytes());
    let v: Vec<_> = results
        .iter()
        .map(|r| json!({"id": r.id, "title": r.title(), "pass": r.pass(), "error": r.error, "checks": checks_json(&r.checks)}))
        .collect();
    out.add_file("acceptance.json", format!("{}\n", serde_json::to_string_pretty(&v)?).into_bytes());
    out.checks = results
        .iter()
        .map(|r| Check::new(format!("criterion-{}", r.id), r.pass(), r.title()))
        .collect();
    Ok(out)
}
