//! Monte Carlo estimates of root-vote probabilities with deterministic
//! per-replicate seeding, paired estimates across coupled arms, and the
//! scaling bookkeeping.

use crate::error::{Error, Result};
use crate::params::{ModelParams, ScalingPreset};
use crate::point::Point;
use crate::rng::StreamKey;
use crate::stats::{first_crossing, isotonic_increasing, wilson_interval};
use crate::tree::{lazy_evaluate, MotionSpec, NodeSampler, VoteVisitor};
use crate::voting::VoteScheme;
use rayon::prelude::*;

/// Default cap on individuals visited per replicate.
pub const DEFAULT_BUDGET: u64 = 1 << 22;

/// Largest allowed fraction of replicates that may hit the budget.
pub const MAX_FAILURE_FRACTION: f64 = 1e-3;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EstimateConfig {
    pub n: u64,
    pub seed: u64,
    pub workers: usize,
    pub budget: u64,
    pub short_circuit: bool,
}

impl EstimateConfig {
    pub fn new(n: u64, seed: u64) -> Self {
        EstimateConfig { n, seed, workers: 1, budget: DEFAULT_BUDGET, short_circuit: true }
    }

    pub fn with_workers(mut self, workers: usize) -> Self {
        self.workers = workers;
        self
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Estimate {
    pub p_hat: f64,
    /// Replicates that completed.
    pub n: u64,
    pub stderr: f64,
    pub ci95: (f64, f64),
    pub seed: u64,
    pub budget_exhausted_count: u64,
    /// Mean number of individuals drawn per replicate.
    pub mean_visited: f64,
    /// Largest DFS stack seen in any replicate.
    pub peak_live: u64,
}

impl Estimate {
    pub fn from_counts(ones: u64, n: u64, seed: u64) -> Self {
        let p = if n > 0 { ones as f64 / n as f64 } else { f64::NAN };
        Estimate {
            p_hat: p,
            n,
            stderr: if n > 0 { (p * (1.0 - p) / n as f64).sqrt() } else { f64::NAN },
            ci95: wilson_interval(ones, n, 1.959_963_984_540_054),
            seed,
            budget_exhausted_count: 0,
            mean_visited: 0.0,
            peak_live: 0,
        }
    }
}

/// Run `f` on replicates 0..n with `workers` threads, results in replicate order.
pub fn run_replicates<T, F>(n: u64, workers: usize, f: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(u64) -> T + Sync + Send,
{
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .map_err(|e| Error::Domain(format!("thread pool: {e}")))?;
    Ok(pool.install(|| (0..n).into_par_iter().map(&f).collect()))
}

/// Expected number of individuals ever alive up to time t: (3e^{2t/ε²} - 1)/2.
pub fn expected_population(params: &ModelParams, t: f64) -> f64 {
    (3.0 * (2.0 * t / params.epsilon.powi(2)).exp() - 1.0) / 2.0
}

/// Reject horizons whose expected tree size is not well inside the budget.
pub fn check_feasible(params: &ModelParams, t: f64, budget: u64) -> Result<()> {
    if !(t >= 0.0) {
        return Err(Error::Domain(format!("t must be >= 0, got {t}")));
    }
    let expected = expected_population(params, t);
    if expected * 10.0 > budget as f64 {
        return Err(Error::Infeasible(format!(
            "t/ε² = {:.2} gives ~{expected:.3e} individuals per tree against a budget of {budget}",
            t / params.epsilon.powi(2)
        )));
    }
    Ok(())
}

/// One motion/scheme pair evaluated on every replicate.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Arm {
    pub motion: MotionSpec,
    pub scheme: VoteScheme,
}

impl Arm {
    pub fn new(motion: MotionSpec, scheme: VoteScheme) -> Self {
        Arm { motion, scheme }
    }
}

/// Several arms evaluated on shared randomness.
#[derive(Clone, Debug, PartialEq)]
pub struct CoupledEstimate {
    pub arms: Vec<Estimate>,
    /// Replicate counts per joint outcome; bit i is arm i's root vote.
    pub patterns: Vec<u64>,
    pub n: u64,
    pub budget_exhausted_count: u64,
}

impl CoupledEstimate {
    /// Mean and paired standard error of Σ wᵢ·voteᵢ + offset.
    pub fn contrast(&self, weights: &[f64], offset: f64) -> (f64, f64) {
        assert_eq!(weights.len(), self.arms.len());
        let value = |pat: usize| -> f64 {
            offset + weights.iter().enumerate().map(|(i, w)| if pat >> i & 1 == 1 { *w } else { 0.0 }).sum::<f64>()
        };
        let n = self.n as f64;
        let mean = self.patterns.iter().enumerate().map(|(p, &c)| c as f64 * value(p)).sum::<f64>() / n;
        let var = self
            .patterns
            .iter()
            .enumerate()
            .map(|(p, &c)| c as f64 * (value(p) - mean).powi(2))
            .sum::<f64>()
            / (n - 1.0).max(1.0);
        (mean, (var / n).sqrt())
    }

    /// arms[i] - arms[j].
    pub fn difference(&self, i: usize, j: usize) -> (f64, f64) {
        let mut w = vec![0.0; self.arms.len()];
        w[i] += 1.0;
        w[j] -= 1.0;
        self.contrast(&w, 0.0)
    }
}

/// P̂[root vote = 1] from n lazily evaluated trees rooted at x.
pub fn estimate_u(
    params: &ModelParams,
    x: &Point,
    t: f64,
    motion: &MotionSpec,
    scheme: &VoteScheme,
    cfg: &EstimateConfig,
) -> Result<Estimate> {
    let mut c = estimate_coupled(params, x, t, &[Arm::new(*motion, *scheme)], cfg)?;
    Ok(c.arms.remove(0))
}

/// Evaluate every arm on each replicate with the same per-label streams, so
/// topology, lifetimes, Brownian and small-jump noise are shared.
pub fn estimate_coupled(
    params: &ModelParams,
    x: &Point,
    t: f64,
    arms: &[Arm],
    cfg: &EstimateConfig,
) -> Result<CoupledEstimate> {
    if cfg.n == 0 {
        return Err(Error::Domain("n must be positive".into()));
    }
    if arms.is_empty() || arms.len() > 16 {
        return Err(Error::Domain("between 1 and 16 arms".into()));
    }
    for a in &arms[1..] {
        arms[0].motion.couplable(&a.motion)?;
    }
    for a in arms {
        a.scheme.initial.validate()?;
    }
    check_feasible(params, t, cfg.budget)?;
    let samplers: Vec<NodeSampler> =
        arms.iter().map(|a| NodeSampler::new(params, &a.motion, t)).collect::<Result<_>>()?;

    // Ok(None): the replicate hit the budget or an undefined normal.
    let outcomes = run_replicates(cfg.n, cfg.workers, |i| -> Result<Option<(u16, u64, u64)>> {
        let key = StreamKey::replicate(cfg.seed, i);
        let mut bits = 0u16;
        let mut visited = 0;
        let mut peak = 0;
        for (k, (arm, sampler)) in arms.iter().zip(&samplers).enumerate() {
            let mut visitor = VoteVisitor { scheme: arm.scheme };
            match lazy_evaluate(sampler, key, *x, &mut visitor, cfg.short_circuit, cfg.budget) {
                Ok((v, stats)) => {
                    bits |= (v as u16) << k;
                    visited += stats.visited;
                    peak = peak.max(stats.peak_live);
                }
                Err(Error::BudgetExceeded(_)) | Err(Error::NormalUndefined(_)) => return Ok(None),
                Err(e) => return Err(e),
            }
        }
        Ok(Some((bits, visited, peak)))
    })?;

    let mut patterns = vec![0u64; 1 << arms.len()];
    let mut failed = 0u64;
    let mut visited = 0u64;
    let mut peak = 0u64;
    for o in outcomes {
        match o? {
            Some((bits, v, p)) => {
                patterns[bits as usize] += 1;
                visited += v;
                peak = peak.max(p);
            }
            None => failed += 1,
        }
    }
    if failed as f64 > MAX_FAILURE_FRACTION * cfg.n as f64 {
        return Err(Error::TooManyBudgetFailures { failed, n: cfg.n });
    }
    let n = cfg.n - failed;
    let per_arm = visited as f64 / (n.max(1) * arms.len() as u64) as f64;
    let arms_est = (0..arms.len())
        .map(|k| {
            let ones: u64 = patterns.iter().enumerate().filter(|(p, _)| p >> k & 1 == 1).map(|(_, c)| c).sum();
            let mut e = Estimate::from_counts(ones, n, cfg.seed);
            e.budget_exhausted_count = failed;
            e.mean_visited = per_arm;
            e.peak_live = peak;
            e
        })
        .collect();
    Ok(CoupledEstimate { arms: arms_est, patterns, n, budget_exhausted_count: failed })
}

#[derive(Clone, Debug, PartialEq)]
pub struct Scan {
    pub points: Vec<(f64, Estimate)>,
    /// Level-1/2 crossing of the raw profile.
    pub crossing: Option<f64>,
    /// Largest deviation of the profile from its isotonic fit.
    pub isotonic_residual: f64,
}

/// Estimates along x_grid·direction; the same seeds are used at every point.
pub fn interface_scan(
    params: &ModelParams,
    t: f64,
    direction: &Point,
    x_grid: &[f64],
    motion: &MotionSpec,
    scheme: &VoteScheme,
    cfg: &EstimateConfig,
) -> Result<Scan> {
    if x_grid.windows(2).any(|w| w[0] > w[1]) {
        return Err(Error::Domain("x grid must be sorted".into()));
    }
    let points = x_grid
        .iter()
        .map(|&x| Ok((x, estimate_u(params, &(*direction * x), t, motion, scheme, cfg)?)))
        .collect::<Result<Vec<_>>>()?;
    let xs: Vec<f64> = points.iter().map(|p| p.0).collect();
    let ps: Vec<f64> = points.iter().map(|p| p.1.p_hat).collect();
    let fit = isotonic_increasing(&ps, &vec![1.0; ps.len()]);
    let isotonic_residual = ps.iter().zip(&fit).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    Ok(Scan { crossing: first_crossing(&xs, &ps, 0.5), points, isotonic_residual })
}

/// F(ε) = I²ε^{-2/α}|log ε| + I^{α-1}.
pub fn f_eps(params: &ModelParams) -> f64 {
    let (a, e, i) = (params.alpha, params.epsilon, params.i_val);
    i * i * e.powf(-2.0 / a) * params.log_eps() + i.powf(a - 1.0)
}

pub const ASSUMPTION_COLUMNS: [&str; 5] = ["I|log e|", "I|log e|^2", "I|log e|^3", "e^2 I^-2 |log e|", "I^2a e^-2 |log e|^a"];

#[derive(Clone, Debug, PartialEq)]
pub struct AssumptionRow {
    pub epsilon: f64,
    pub i_val: f64,
    pub values: [f64; 5],
}

#[derive(Clone, Debug, PartialEq)]
pub struct AssumptionReport {
    pub rows: Vec<AssumptionRow>,
    /// Per column: decreasing over the tail of the grid (ε decreasing).
    pub decreasing: [bool; 5],
}

impl AssumptionReport {
    pub fn all_ok(&self) -> bool {
        self.decreasing.iter().all(|&d| d)
    }
}

/// The scaling expressions that must vanish as ε → 0, for an arbitrary I.
pub fn assumption_table(scaling: impl Fn(f64) -> f64, alpha: f64, eps_grid: &[f64]) -> Result<AssumptionReport> {
    if eps_grid.is_empty() {
        return Err(Error::Domain("empty ε grid".into()));
    }
    let mut grid = eps_grid.to_vec();
    grid.sort_by(|a, b| b.total_cmp(a));
    let rows: Vec<AssumptionRow> = grid
        .iter()
        .map(|&e| {
            let i = scaling(e);
            let l = e.ln().abs();
            AssumptionRow {
                epsilon: e,
                i_val: i,
                values: [i * l, i * l * l, i * l.powi(3), e * e / (i * i) * l, i.powf(2.0 * alpha) / (e * e) * l.powf(alpha)],
            }
        })
        .collect();
    let tail = rows.len() / 2;
    let mut decreasing = [true; 5];
    for (c, d) in decreasing.iter_mut().enumerate() {
        let col: Vec<f64> = rows[tail..].iter().map(|r| r.values[c]).collect();
        *d = col.windows(2).all(|w| w[1] < w[0]) && rows.last().unwrap().values[c] < rows[0].values[c];
    }
    Ok(AssumptionReport { rows, decreasing })
}

pub fn assumption_report(preset: ScalingPreset, alpha: f64, eps_grid: &[f64]) -> Result<AssumptionReport> {
    preset.validate(alpha)?;
    assumption_table(|e| preset.eval(alpha, e), alpha, eps_grid)
}
