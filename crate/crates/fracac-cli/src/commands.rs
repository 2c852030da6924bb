//! Per-command defaults and execution. Every command is a pure function of
//! its [`RunConfig`] and returns its files in memory.

use crate::config::RunConfig;
use crate::output::{csv, f, header, CommandOutput};
use crate::suites::*;
use anyhow::{bail, Context, Result};
use fracac::estimator::{assumption_report, estimate_u, f_eps, EstimateConfig, ASSUMPTION_COLUMNS};
use fracac::geometry::{mcf_track, CouplingConfig, SphereFlow, TrackConfig};
use fracac::oracle::{duality_compare, solve, GridField, OracleConfig};
use fracac::voting::{Region, SchemeKind, VoteScheme};
use fracac::{ModelParams, Point, ScalingPreset};

pub const COMMANDS: [&str; 8] = [
    "subordinator-stats",
    "vote-math",
    "estimate",
    "coupling-check",
    "oracle-run",
    "mcf-track",
    "assumption-report",
    "acceptance",
];

/// Seed used when neither the config nor the command line sets one.
pub const DEFAULT_SEED: u64 = 20_240_601;

pub fn defaults(command: &str) -> Result<RunConfig> {
    let kv: &[(&str, &str)] = match command {
        "subordinator-stats" => &[
            ("alpha", "1.5"),
            ("epsilon", "0.1"),
            ("preset", "log"),
            ("s", "0.1"),
            ("lambdas", "0.5,1,5"),
            ("qs", "0.5,1.5"),
            ("ks", "1,2"),
            ("n", "100000"),
            ("trunc_scale", "1"),
            ("heat_n", "10000"),
        ],
        "vote-math" => &[("trees", "100"), ("iterate_alpha", "1.5"), ("iterate_preset", "log"), ("iterate_m", "2,3,4")],
        "estimate" => &[
            ("alpha", "1.5"),
            ("epsilon", "0.3"),
            ("preset", "log"),
            ("motion", "stable"),
            ("dim", "1"),
            ("resolution_ratio", "0.01"),
            ("scheme", "majority"),
            ("initial", "step"),
            ("t", "0.09"),
            ("x", "-1,-0.5,0,0.5,1"),
            ("n", "100000"),
            ("budget", "4194304"),
        ],
        "coupling-check" => &[
            ("mode", "voting"),
            ("alpha", "1.5"),
            ("epsilon", "0.15"),
            ("preset", "log"),
            ("t", "0.045"),
            ("x", "-1,-0.3,0,0.3,1"),
            ("resolution_ratio", "0.01"),
            ("n", "100000"),
            ("r0", "1"),
            ("offset", "0.05"),
            ("k", "1"),
            ("s_grid", "0,0.01,0.02,0.03,0.04"),
            ("beta_fraction", "0.5"),
            ("steps", "32"),
            ("epsilons", "0.3,0.2,0.15"),
            ("l", "1"),
            ("sign", "-1"),
        ],
        "oracle-run" => &[
            ("alpha", "1.5"),
            ("epsilon", "0.3"),
            ("preset", "log"),
            ("dim", "1"),
            ("half_width", "64"),
            ("grid_n", "16384"),
            ("dt", "0.00045"),
            ("times", "0.045,0.09,0.18"),
            ("smoothing_cells", "2"),
            ("initial", "step"),
            ("duality", "true"),
            ("duality_x", "-1,-0.5,0,0.5,1"),
            ("n", "100000"),
        ],
        "mcf-track" => &[
            ("alpha", "1.7"),
            ("epsilon", "0.05"),
            ("preset", "log"),
            ("r0", "1"),
            ("half_width", "2"),
            ("grid_n", "256"),
            ("dt", "0.00025"),
            ("times", "0.05,0.1,0.15,0.2,0.25,0.3"),
            ("smoothing_cells", "1"),
            ("c_max", "5"),
            ("control_alpha", "2"),
        ],
        "assumption-report" => &[("alpha", "1.5"), ("preset", "log"), ("eps_grid", "1e-2,1e-3,1e-4,1e-5,1e-6")],
        "acceptance" => &[("criteria", "1,2,3,4,5,6,7,8,9,10")],
        other => bail!("unknown command '{other}' (expected one of: {})", COMMANDS.join(", ")),
    };
    Ok(RunConfig::new(command, DEFAULT_SEED, kv))
}

pub fn run(cfg: &RunConfig) -> Result<CommandOutput> {
    let out = match cfg.command.as_str() {
        "subordinator-stats" => subordinator_stats(cfg),
        "vote-math" => vote_math(cfg),
        "estimate" => estimate(cfg),
        "coupling-check" => coupling(cfg),
        "oracle-run" => oracle_run(cfg),
        "mcf-track" => track(cfg),
        "assumption-report" => assumptions(cfg),
        "acceptance" => crate::acceptance::command(cfg),
        other => bail!("unknown command '{other}'"),
    }?;
    Ok(out.finish(cfg))
}

fn positive_n(cfg: &RunConfig) -> Result<u64> {
    let n = cfg.u64("n")?;
    if n == 0 {
        bail!("usage: n must be positive");
    }
    Ok(n)
}

fn checks_csv(cfg: &RunConfig, out: &CommandOutput) -> Vec<u8> {
    let rows: Vec<Vec<String>> = out
        .checks
        .iter()
        .map(|c| vec![c.name.clone(), if c.pass { "pass" } else { "fail" }.into(), format!("\"{}\"", c.detail.replace('"', "'"))])
        .collect();
    csv(cfg, &["check", "result", "detail"], &rows)
}

fn with_checks_file(cfg: &RunConfig, mut out: CommandOutput) -> CommandOutput {
    let bytes = checks_csv(cfg, &out);
    out.add_file("checks.csv", bytes);
    out
}

fn subordinator_stats(cfg: &RunConfig) -> Result<CommandOutput> {
    let params = cfg.params()?;
    // The marked fixed points must exist for the suite to be meaningful.
    params.u_pm().context("configuration rejected")?;
    let n = positive_n(cfg)? as usize;
    let suite = SubordinatorSuite {
        s: cfg.f64("s")?,
        lambdas: cfg.f64_list("lambdas")?,
        qs: cfg.f64_list("qs")?,
        ks: cfg.f64_list("ks")?.into_iter().map(|k| k as u32).collect(),
        n,
        trunc_scale: cfg.f64("trunc_scale")?,
        seed: cfg.seed,
    };
    let mut out = CommandOutput::default();
    out.checks = subordinator_checks(&params, &suite)?;
    out.checks.extend(heat_kernel_checks(cfg.usize("heat_n")?, cfg.seed));
    Ok(with_checks_file(cfg, out))
}

fn vote_math(cfg: &RunConfig) -> Result<CommandOutput> {
    let mut out = CommandOutput::default();
    out.checks = algebra_checks(cfg.seed, cfg.usize("trees")?)?;
    let ms: Vec<i32> = cfg.f64_list("iterate_m")?.into_iter().map(|m| m as i32).collect();
    let preset = ScalingPreset::parse(cfg.str("iterate_preset")?)?;
    let (rows, checks) = iterate_checks(cfg.f64("iterate_alpha")?, preset, &ms)?;
    out.checks.extend(checks);
    let rows: Vec<Vec<String>> =
        rows.iter().map(|r| vec![f(r.epsilon), f(r.b), f(r.log_eps), r.hit.to_string()]).collect();
    out.add_file("iterates.csv", csv(cfg, &["epsilon", "b", "abs_log_eps", "hit_index"], &rows));
    Ok(with_checks_file(cfg, out))
}

fn estimate(cfg: &RunConfig) -> Result<CommandOutput> {
    let n = positive_n(cfg)?;
    let params = cfg.params()?;
    let motion = cfg.motion()?;
    let scheme = cfg.scheme(&params)?;
    let mut ec = EstimateConfig::new(n, cfg.seed).with_workers(cfg.workers);
    ec.budget = cfg.budget()?;
    let mut rows = Vec::new();
    for t in cfg.f64_list("t")? {
        for x in cfg.f64_list("x")? {
            let e = estimate_u(&params, &Point::on_axis(motion.dim, x), t, &motion, &scheme, &ec)?;
            rows.push(vec![
                f(x),
                f(t),
                f(e.p_hat),
                f(e.stderr),
                f(e.ci95.0),
                f(e.ci95.1),
                e.n.to_string(),
                e.budget_exhausted_count.to_string(),
            ]);
        }
    }
    let mut out = CommandOutput::default();
    out.add_file(
        "estimate.csv",
        csv(cfg, &["x", "t", "p_hat", "stderr", "ci_lo", "ci_hi", "n", "budget_exhausted"], &rows),
    );
    Ok(out)
}

fn coupling(cfg: &RunConfig) -> Result<CommandOutput> {
    let n = positive_n(cfg)?;
    let params = cfg.params()?;
    let mut out = CommandOutput::default();
    match cfg.str("mode")? {
        "voting" => {
            let ec = EstimateConfig::new(n, cfg.seed).with_workers(cfg.workers);
            let (ests, rows, checks) =
                voting_coupling(&params, cfg.f64("t")?, &cfg.f64_list("x")?, cfg.f64("resolution_ratio")?, &ec)?;
            let arm_rows: Vec<Vec<String>> = ests
                .iter()
                .flat_map(|(x, e)| {
                    e.arms.iter().zip(VOTING_ARMS).map(move |(a, name)| vec![f(*x), name.to_string(), f(a.p_hat), f(a.stderr)])
                })
                .collect();
            out.add_file("arms.csv", csv(cfg, &["x", "arm", "p_hat", "stderr"], &arm_rows));
            let rel: Vec<Vec<String>> = rows
                .iter()
                .map(|r| vec![f(r.x), r.relation.to_string(), f(r.value), f(r.se), f(r.margin), r.pass.to_string()])
                .collect();
            out.add_file("relations.csv", csv(cfg, &["x", "relation", "value", "se", "margin_se", "pass"], &rel));
            out.checks = checks;
        }
        "sphere" => {
            let flow = SphereFlow::new(cfg.f64("r0")?, 2)?;
            let t = cfg.f64("t")?;
            let r = flow.radius(t)?;
            let cc = CouplingConfig {
                x0: Point::from_slice(&[r + cfg.f64("offset")?, 0.0]),
                t,
                k: cfg.u64("k")? as u32,
                s_grid: cfg.f64_list("s_grid")?,
                beta: r * cfg.f64("beta_fraction")?,
                steps: cfg.usize("steps")?,
                resolution_ratio: cfg.f64("resolution_ratio")?,
                n,
                seed: cfg.seed,
                workers: cfg.workers,
            };
            out.checks.push(z_identity_check(&params, 1000, cfg.seed)?);
            let (rep, check) = sphere_coupling_check(&params, &flow, &cc)?;
            out.checks.push(check);
            let rows: Vec<Vec<String>> = rep
                .rows
                .iter()
                .map(|r| {
                    vec![
                        f(r.s),
                        r.eligible.to_string(),
                        f(r.rate_plus),
                        f(r.rate_minus),
                        f(r.sigma),
                        f(r.deviation_rate),
                        f(r.deviation_sigma),
                    ]
                })
                .collect();
            out.add_file(
                "coupling.csv",
                csv(cfg, &["s", "eligible", "rate_plus", "rate_minus", "sigma", "deviation_rate", "deviation_sigma"], &rows),
            );
            let report = serde_json::json!({
                "target": rep.target,
                "c0_analytic": rep.c0_analytic,
                "d0_analytic": rep.d0_analytic,
                "c0_fitted": rep.c0_fitted,
                "d0_fitted": rep.d0_fitted,
                "l": rep.l,
                "shift": rep.shift,
                "excluded_fraction": rep.excluded_fraction,
                "pass": rep.pass,
            });
            out.add_file("coupling.json", format!("{}\n", serde_json::to_string_pretty(&report)?).into_bytes());
        }
        "gronwall" => {
            let suite = GapSuite {
                alpha: params.alpha,
                preset: params.scaling,
                epsilons: cfg.f64_list("epsilons")?,
                t: cfg.f64("t")?,
                l: cfg.f64("l")?,
                sign: cfg.f64("sign")?,
                offset: cfg.f64("offset")?,
                resolution_ratio: cfg.f64("resolution_ratio")?,
                n,
                seed: cfg.seed,
                workers: cfg.workers,
            };
            let (rows, checks) = gap_checks(&suite)?;
            let rows: Vec<Vec<String>> =
                rows.iter().map(|r| vec![f(r.epsilon), f(r.gap), f(r.se), f(r.f_eps), f(r.decay)]).collect();
            out.add_file("gaps.csv", csv(cfg, &["epsilon", "gap", "se", "f_eps", "decay"], &rows));
            out.checks = checks;
        }
        other => bail!("unknown coupling-check mode '{other}' (voting, sphere, gronwall)"),
    }
    Ok(with_checks_file(cfg, out))
}

fn oracle_config(cfg: &RunConfig) -> Result<OracleConfig> {
    Ok(OracleConfig {
        half_width: cfg.f64("half_width")?,
        n: cfg.usize("grid_n")?,
        dt: cfg.f64("dt")?,
        smoothing_cells: cfg.f64("smoothing_cells")?,
    })
}

fn oracle_run(cfg: &RunConfig) -> Result<CommandOutput> {
    let params = cfg.params()?;
    let oc = oracle_config(cfg)?;
    let times = cfg.f64_list("times")?;
    let t_end = times.iter().cloned().fold(0.0, f64::max);
    let scheme = VoteScheme::new(SchemeKind::Majority, crate::config::parse_initial(cfg.str("initial")?, &params)?);
    let ic = scheme.initial;
    let init = match (cfg.usize("dim")?, ic.region) {
        (1, Region::HalfLine) => GridField::step_1d(oc.half_width, oc.n, oc.smoothing_cells, ic.hi, ic.lo)?,
        (2, Region::OutsideBall(r0)) => GridField::radial_step(oc.half_width, oc.n, r0, oc.smoothing_cells, ic.lo, ic.hi)?,
        (d, _) => bail!("oracle-run supports dim 1 with a step or dim 2 with ball:<r0>, not dim {d} with '{}'", cfg.str("initial")?),
    };
    let sol = solve(&params, &init, t_end, oc.dt, &times)?;
    let mut out = CommandOutput::default();
    for (i, snap) in sol.snapshots.iter().enumerate() {
        let mut bin = Vec::new();
        snap.write_snapshot(&mut bin)?;
        out.add_file(format!("snapshot_{i}.bin"), bin);
        let mut cut = header(cfg);
        cut.push_str(&format!("# t={}\n", snap.time));
        cut.push_str(&snap.line_cut_csv());
        out.add_file(format!("cut_{i}.csv"), cut.into_bytes());
    }
    if cfg.str("duality")? == "true" {
        let n = positive_n(cfg)?;
        let points: Vec<(f64, f64)> =
            times.iter().flat_map(|&t| cfg.f64_list("duality_x").unwrap_or_default().into_iter().map(move |x| (x, t))).collect();
        let rows = duality_compare(&params, &scheme, &points, &oc, &EstimateConfig::new(n, cfg.seed).with_workers(cfg.workers))?;
        let worst = rows.iter().map(|r| r.diff / (3.0 * r.mc.stderr + r.tol_oracle)).fold(0.0, f64::max);
        let failing: Vec<String> = rows.iter().filter(|r| !r.pass).map(|r| format!("(x={}, t={})", r.x, r.t)).collect();
        out.checks.push(crate::output::Check::new(
            format!("duality-alpha-{}", params.alpha),
            failing.is_empty(),
            format!(
                "{} points, max |MC - oracle|/(3se + tol) = {worst:.3}, max tol_oracle = {:.2e}{}",
                rows.len(),
                rows.iter().map(|r| r.tol_oracle).fold(0.0, f64::max),
                if failing.is_empty() { String::new() } else { format!("; failing {}", failing.join(" ")) }
            ),
        ));
        let rows: Vec<Vec<String>> = rows
            .iter()
            .map(|r| vec![f(r.x), f(r.t), f(r.mc.p_hat), f(r.mc.stderr), f(r.oracle), f(r.tol_oracle), f(r.diff), r.pass.to_string()])
            .collect();
        out.add_file(
            "duality.csv",
            csv(cfg, &["x", "t", "mc", "stderr", "oracle", "tol_oracle", "diff", "pass"], &rows),
        );
        out = with_checks_file(cfg, out);
    }
    Ok(out)
}

fn track(cfg: &RunConfig) -> Result<CommandOutput> {
    let tc = TrackConfig {
        r0: cfg.f64("r0")?,
        half_width: cfg.f64("half_width")?,
        n: cfg.usize("grid_n")?,
        dt: cfg.f64("dt")?,
        times: cfg.f64_list("times")?,
        smoothing_cells: cfg.f64("smoothing_cells")?,
    };
    let c_max = cfg.f64("c_max")?;
    let mut alphas = vec![cfg.f64("alpha")?];
    alphas.extend(cfg.f64_list("control_alpha")?);
    let mut rows = Vec::new();
    let mut out = CommandOutput::default();
    for alpha in alphas {
        let params = ModelParams::new(alpha, cfg.f64("epsilon")?, cfg.preset()?)?;
        let track = mcf_track(&params, &tc)?;
        let c = track.iter().map(|r| r.c).fold(0.0, f64::max);
        let scale = if params.is_brownian() { "e|log e|" } else { "I|log e|" };
        out.checks.push(crate::output::Check::new(
            format!("radius-band-alpha-{alpha}"),
            c <= c_max,
            format!("max |r - sqrt(r0^2 - 2t)| = {c:.3} x {scale} ({:.4}); c_max = {c_max}", params.interface_scale()),
        ));
        rows.extend(track.iter().map(|r| vec![f(alpha), f(r.t), f(r.radius), f(r.predicted), f(r.c)]));
    }
    out.add_file("radius.csv", csv(cfg, &["alpha", "t", "radius", "predicted", "c"], &rows));
    Ok(with_checks_file(cfg, out))
}

fn assumptions(cfg: &RunConfig) -> Result<CommandOutput> {
    let alpha = cfg.f64("alpha")?;
    let preset = cfg.preset()?;
    let rep = assumption_report(preset, alpha, &cfg.f64_list("eps_grid")?)?;
    let mut cols = vec!["epsilon", "I"];
    cols.extend(ASSUMPTION_COLUMNS);
    cols.push("F");
    let rows: Vec<Vec<String>> = rep
        .rows
        .iter()
        .map(|r| {
            let mut v = vec![f(r.epsilon), f(r.i_val)];
            v.extend(r.values.iter().map(|x| f(*x)));
            v.push(f(f_eps(&ModelParams::new(alpha, r.epsilon, preset)?)));
            Ok(v)
        })
        .collect::<Result<_>>()?;
    let mut out = CommandOutput::default();
    out.add_file("assumptions.csv", csv(cfg, &cols, &rows));
    for (name, ok) in ASSUMPTION_COLUMNS.iter().zip(rep.decreasing) {
        out.checks.push(crate::output::Check::new(format!("decreasing {name}"), ok, "along the epsilon grid"));
    }
    Ok(with_checks_file(cfg, out))
}
