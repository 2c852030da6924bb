//! Shrinking spheres under mean curvature flow, signed distances, the shifted
//! Z± motions, and empirical checks of the dimension-reduction couplings.

use crate::error::{Error, Result};
use crate::estimator::{estimate_coupled, f_eps, run_replicates, Arm, EstimateConfig};
use crate::oracle::{solve, GridField};
use crate::params::ModelParams;
use crate::point::Point;
use crate::rng::{Purpose, StreamKey};
use crate::stats::{first_crossing, isotonic_increasing};
use crate::tree::{MotionKind, MotionSpec};
use crate::levy::TruncatedSubordinator;
use crate::voting::{InitialCondition, SchemeKind, VoteScheme};
use rand_distr::{Distribution, StandardNormal};

/// A sphere of radius r0 in `dim` dimensions shrinking by ḋ = Δd:
/// r(t)² = r0² - 2(dim-1)t.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SphereFlow {
    pub r0: f64,
    pub dim: usize,
}

impl SphereFlow {
    pub fn new(r0: f64, dim: usize) -> Result<Self> {
        if !(r0 > 0.0 && r0.is_finite()) || dim < 2 {
            return Err(Error::Domain(format!("sphere flow needs r0 > 0 and dim >= 2, got r0={r0}, dim={dim}")));
        }
        Ok(SphereFlow { r0, dim })
    }

    pub fn extinction_time(&self) -> f64 {
        self.r0 * self.r0 / (2.0 * (self.dim - 1) as f64)
    }

    pub fn radius(&self, t: f64) -> Result<f64> {
        if t >= self.extinction_time() {
            return Err(Error::FlowExtinct { t, extinction: self.extinction_time() });
        }
        Ok((self.r0 * self.r0 - 2.0 * (self.dim - 1) as f64 * t).sqrt())
    }

    /// Normal speed bound on [0, t]: (dim-1)/r(t).
    pub fn v0(&self, t: f64) -> Result<f64> {
        Ok((self.dim - 1) as f64 / self.radius(t)?)
    }

    /// Half the smallest radius on [0, t]; the tubular neighbourhood where the
    /// nearest-point map is single valued with room to spare.
    pub fn c0(&self, t: f64) -> Result<f64> {
        Ok(self.radius(t)? / 2.0)
    }

    /// Bound on the radial drift mismatch per unit distance inside a band of
    /// half-width `beta` around the spheres of [0, t].
    pub fn drift_constant(&self, t: f64, beta: f64) -> Result<f64> {
        let r = self.radius(t)?;
        if beta >= r {
            return Err(Error::Domain("band wider than the sphere".into()));
        }
        Ok((self.dim - 1) as f64 / (r * (r - beta)))
    }
}

/// d(x, t) = |x| - r(t); negative inside.
pub fn signed_distance(x: &Point, t: f64, flow: &SphereFlow) -> Result<f64> {
    Ok(x.norm() - flow.radius(t)?)
}

/// Move `x` by `shift` along the outward normal if it lies within `band` of
/// the sphere at flow time `t_remaining`.
pub fn z_shift_by(x: &Point, t_remaining: f64, flow: &SphereFlow, shift: f64, band: f64) -> Result<Point> {
    let r = x.norm();
    let d = r - flow.radius(t_remaining)?;
    if d.abs() > band {
        return Ok(*x);
    }
    if r == 0.0 {
        return Err(Error::NormalUndefined(x.as_slice().to_vec()));
    }
    Ok(*x * ((r + shift) / r))
}

/// Z⁺ (sign > 0) or Z⁻ (sign < 0) position: shifted by ±l·I²|log ε| inside the β-band.
pub fn z_shift(
    x: &Point,
    t_remaining: f64,
    flow: &SphereFlow,
    params: &ModelParams,
    l: f64,
    beta: f64,
    sign: f64,
) -> Result<Point> {
    if x.dim() < 2 {
        return Err(Error::Domain("Z motions need dim >= 2".into()));
    }
    let shift = sign.signum() * l * params.i_val * params.i_val * params.log_eps();
    z_shift_by(x, t_remaining, flow, shift, beta)
}

#[derive(Clone, Debug)]
pub struct CouplingConfig {
    pub x0: Point,
    pub t: f64,
    pub k: u32,
    pub s_grid: Vec<f64>,
    pub beta: f64,
    /// Real-time Euler steps used to build the radial Brownian motion.
    pub steps: usize,
    pub resolution_ratio: f64,
    pub n: u64,
    pub seed: u64,
    pub workers: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct CouplingRow {
    pub s: f64,
    /// Test-half replicates with R_s before the band exit and before t.
    pub eligible: u64,
    pub rate_plus: f64,
    pub rate_minus: f64,
    pub sigma: f64,
    /// P[|R_s - s| > (k+2)I²|log ε|] over all replicates, and its standard error.
    pub deviation_rate: f64,
    pub deviation_sigma: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct CouplingReport {
    pub target: f64,
    pub c0_analytic: f64,
    pub d0_analytic: f64,
    pub c0_fitted: f64,
    /// V₀ + C₀c₀ with the fitted C₀.
    pub d0_fitted: f64,
    pub l: f64,
    pub shift: f64,
    pub rows: Vec<CouplingRow>,
    /// Fraction of (replicate, s) pairs excluded by the band exit or by R_s ≥ t.
    pub excluded_fraction: f64,
    pub pass: bool,
}

struct CouplingSample {
    eligible: Vec<bool>,
    need_plus: Vec<f64>,
    need_minus: Vec<f64>,
    deviated: Vec<bool>,
}

/// Empirical violation rates of d(Z⁺_s, t-s) ≥ B(R_s) - C₀βs and
/// d(Z⁻_s, t-s) ≤ B(R_s) + C₀βs.
///
/// B is the radial part of W: dB = x̂·dW, started at d(x0, t). C₀ is fitted
/// on even replicates (the smallest constant with violation rate ≤ ε^{k+1}
/// at every s) and the rates are reported on odd replicates. The shift uses
/// l = D₀(k+2) with D₀ = V₀ + C₀c₀ from the sphere's explicit constants.
pub fn coupling_check(params: &ModelParams, flow: &SphereFlow, cfg: &CouplingConfig) -> Result<CouplingReport> {
    if flow.dim != 2 || cfg.x0.dim() != 2 {
        return Err(Error::Domain("coupling check runs on circles (dim 2)".into()));
    }
    if cfg.s_grid.is_empty() || cfg.s_grid.iter().any(|&s| s < 0.0) || cfg.n < 4 || cfg.steps == 0 {
        return Err(Error::Domain("coupling check needs a non-negative s grid, n >= 4 and steps > 0".into()));
    }
    let window = (cfg.k + 1) as f64 * params.epsilon.powi(2) * params.log_eps();
    let s_max = cfg.s_grid.iter().cloned().fold(0.0, f64::max);
    if s_max > window {
        return Err(Error::Domain(format!("s grid must stay below (k+1)ε²|log ε| = {window}")));
    }
    let c0_analytic = flow.drift_constant(cfg.t, cfg.beta)?;
    if cfg.beta > flow.c0(cfg.t)? {
        return Err(Error::Domain("beta must not exceed r(t)/2".into()));
    }
    let d0 = flow.v0(cfg.t)? + c0_analytic * flow.c0(cfg.t)?;
    let l = d0 * (cfg.k + 2) as f64;
    let shift = l * params.i_val * params.i_val * params.log_eps();
    let dev_level = (cfg.k + 2) as f64 * params.i_val * params.i_val * params.log_eps();
    let law = TruncatedSubordinator::with_ratio(params, cfg.resolution_ratio)?;
    let d_start = signed_distance(&cfg.x0, cfg.t, flow)?;

    let samples = run_replicates(cfg.n, cfg.workers, |i| -> Result<CouplingSample> {
        let key = StreamKey::replicate(cfg.seed, i);
        let path = law.sample_path(s_max, &mut key.rng(Purpose::SmallJumps));
        let r_at: Vec<f64> = cfg.s_grid.iter().map(|&s| path.value_at(s)).collect();
        let r_max = r_at.iter().cloned().fold(0.0, f64::max);
        // Real-time checkpoints: a uniform grid plus the subordinated times.
        let mut times: Vec<f64> = (1..=cfg.steps).map(|j| r_max * j as f64 / cfg.steps as f64).collect();
        times.extend_from_slice(&r_at);
        times.sort_by(f64::total_cmp);
        times.dedup();
        let mut normals = key.rng(Purpose::Gaussian);
        let mut w = cfg.x0;
        let mut b = d_start;
        let mut now = 0.0;
        let mut exit = cfg.t;
        let mut at: Vec<(f64, Point, f64)> = vec![(0.0, w, b)];
        for &r in &times {
            let dt = r - now;
            if dt > 0.0 {
                let sd = (2.0 * dt).sqrt();
                let norm = w.norm();
                let mut dw = Point::zero(2);
                for c in dw.as_mut_slice() {
                    let z: f64 = StandardNormal.sample(&mut normals);
                    *c = sd * z;
                }
                if norm > 0.0 {
                    b += dw.dot(&w) / norm;
                }
                w = w + dw;
                now = r;
            }
            at.push((r, w, b));
            if exit == cfg.t && r < window && r < cfg.t {
                if signed_distance(&w, cfg.t - r, flow)?.abs() > cfg.beta {
                    exit = r;
                }
            }
        }
        let mut out = CouplingSample {
            eligible: vec![false; r_at.len()],
            need_plus: vec![f64::NEG_INFINITY; r_at.len()],
            need_minus: vec![f64::NEG_INFINITY; r_at.len()],
            deviated: vec![false; r_at.len()],
        };
        for (j, (&s, &r)) in cfg.s_grid.iter().zip(&r_at).enumerate() {
            out.deviated[j] = (r - s).abs() > dev_level;
            if !(r < exit.min(cfg.t)) {
                continue;
            }
            let idx = at.partition_point(|e| e.0 < r);
            let (_, wr, br) = at[idx.min(at.len() - 1)];
            let dw = signed_distance(&wr, cfg.t - s, flow)?;
            out.eligible[j] = true;
            let bs = cfg.beta * s;
            // Violation iff C₀ < need.
            let (np, nm) = (br - (dw + shift), (dw - shift) - br);
            out.need_plus[j] = if bs > 0.0 { np / bs } else if np > 0.0 { f64::INFINITY } else { f64::NEG_INFINITY };
            out.need_minus[j] = if bs > 0.0 { nm / bs } else if nm > 0.0 { f64::INFINITY } else { f64::NEG_INFINITY };
        }
        Ok(out)
    })?;
    let samples: Vec<CouplingSample> = samples.into_iter().collect::<Result<_>>()?;

    let target = params.epsilon.powi(cfg.k as i32 + 1);
    let m = cfg.s_grid.len();
    let mut c0_fitted: f64 = 0.0;
    for j in 0..m {
        for side in 0..2 {
            let mut needs: Vec<f64> = samples
                .iter()
                .step_by(2)
                .filter(|s| s.eligible[j])
                .map(|s| if side == 0 { s.need_plus[j] } else { s.need_minus[j] })
                .collect();
            if needs.is_empty() {
                continue;
            }
            needs.sort_by(|a, b| b.total_cmp(a));
            let allowed = (target * needs.len() as f64).floor() as usize;
            if allowed < needs.len() {
                c0_fitted = c0_fitted.max(needs[allowed]);
            }
        }
    }
    let mut rows = Vec::with_capacity(m);
    let mut pass = true;
    let mut excluded = 0u64;
    for j in 0..m {
        let test: Vec<&CouplingSample> = samples.iter().skip(1).step_by(2).filter(|s| s.eligible[j]).collect();
        excluded += samples.iter().filter(|s| !s.eligible[j]).count() as u64;
        let ne = test.len() as u64;
        let vp = test.iter().filter(|s| s.need_plus[j] > c0_fitted).count() as f64;
        let vm = test.iter().filter(|s| s.need_minus[j] > c0_fitted).count() as f64;
        let nd = samples.iter().filter(|s| s.deviated[j]).count() as f64;
        let nn = samples.len() as f64;
        let sigma = if ne > 0 { (target * (1.0 - target) / ne as f64).sqrt() } else { f64::NAN };
        let dev_sigma = (target * (1.0 - target) / nn).sqrt();
        let row = CouplingRow {
            s: cfg.s_grid[j],
            eligible: ne,
            rate_plus: if ne > 0 { vp / ne as f64 } else { 0.0 },
            rate_minus: if ne > 0 { vm / ne as f64 } else { 0.0 },
            sigma,
            deviation_rate: nd / nn,
            deviation_sigma: dev_sigma,
        };
        if ne > 0 {
            pass &= row.rate_plus <= target + 3.0 * sigma && row.rate_minus <= target + 3.0 * sigma;
        }
        pass &= row.deviation_rate <= target + 3.0 * dev_sigma;
        rows.push(row);
    }
    Ok(CouplingReport {
        target,
        c0_analytic,
        d0_analytic: d0,
        c0_fitted,
        d0_fitted: flow.v0(cfg.t)? + c0_fitted * flow.c0(cfg.t)?,
        l,
        shift,
        rows,
        excluded_fraction: excluded as f64 / (samples.len() * m) as f64,
        pass,
    })
}

/// Radius of the `level` crossing of the angular average of a radially
/// symmetric 2D field (0 inside, 1 outside).
pub fn level_set_radius(field: &GridField, level: f64) -> Result<f64> {
    if field.dim != 2 {
        return Err(Error::Domain("level_set_radius needs a 2D field".into()));
    }
    let h = field.spacing();
    let nbins = (field.half_width / h).floor() as usize;
    let mut sum = vec![0.0; nbins];
    let mut count = vec![0.0; nbins];
    for i in 0..field.n {
        let y = field.coord(i);
        for j in 0..field.n {
            let x = field.coord(j);
            let r = x.hypot(y);
            let bin = (r / h).floor() as usize;
            if bin < nbins {
                sum[bin] += field.values[i * field.n + j];
                count[bin] += 1.0;
            }
        }
    }
    let mut radii = Vec::new();
    let mut means = Vec::new();
    let mut weights = Vec::new();
    for k in 0..nbins {
        if count[k] > 0.0 {
            radii.push((k as f64 + 0.5) * h);
            means.push(sum[k] / count[k]);
            weights.push(count[k]);
        }
    }
    let fit = isotonic_increasing(&means, &weights);
    first_crossing(&radii, &fit, level).ok_or(Error::NoCrossing)
}

#[derive(Clone, Debug, PartialEq)]
pub struct RadiusRow {
    pub t: f64,
    pub radius: f64,
    pub predicted: f64,
    /// |radius - predicted| in units of the interface scale.
    pub c: f64,
}

#[derive(Clone, Debug)]
pub struct TrackConfig {
    pub r0: f64,
    pub half_width: f64,
    pub n: usize,
    pub dt: f64,
    pub times: Vec<f64>,
    pub smoothing_cells: f64,
}

/// Solve from the smoothed indicator of {|x| > r0} and compare the level-1/2
/// radius with the circle r(t)² = r0² - 2t. The scale is I|log ε| (ε|log ε| when α = 2).
pub fn mcf_track(params: &ModelParams, cfg: &TrackConfig) -> Result<Vec<RadiusRow>> {
    let flow = SphereFlow::new(cfg.r0, 2)?;
    let init = GridField::radial_step(cfg.half_width, cfg.n, cfg.r0, cfg.smoothing_cells, 0.0, 1.0)?;
    let t_end = cfg.times.iter().cloned().fold(0.0, f64::max);
    let sol = solve(params, &init, t_end, cfg.dt, &cfg.times)?;
    let scale = params.interface_scale();
    sol.snapshots
        .iter()
        .map(|snap| {
            let radius = level_set_radius(snap, 0.5)?;
            let predicted = flow.radius(snap.time)?;
            Ok(RadiusRow { t: snap.time, radius, predicted, c: (radius - predicted).abs() / scale })
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq)]
pub struct GapRow {
    pub epsilon: f64,
    /// Paired difference P[V×(Z)] - P[V×(W_R)] and its standard error.
    pub gap: f64,
    pub se: f64,
    pub f_eps: f64,
    pub decay: f64,
}

#[derive(Clone, Debug)]
pub struct GapConfig {
    pub flow: SphereFlow,
    pub x: Point,
    pub t: f64,
    pub l: f64,
    pub beta: f64,
    pub sign: f64,
    pub resolution_ratio: f64,
    pub estimate: EstimateConfig,
}

/// Paired gap between marked voting on the Z± tree and on the plain
/// subordinated tree, with initial condition 1 outside the ball of radius r0.
pub fn gronwall_gap(params: &ModelParams, cfg: &GapConfig) -> Result<GapRow> {
    let kind = if cfg.sign >= 0.0 { MotionKind::ZPlus } else { MotionKind::ZMinus };
    let base = MotionSpec::new(MotionKind::SubordinatedTruncated, cfg.flow.dim)
        .with_flow(cfg.flow, cfg.l, cfg.beta)
        .with_resolution(cfg.resolution_ratio);
    let scheme = VoteScheme::new(SchemeKind::Marked, InitialCondition::ball(cfg.flow.r0));
    let arms = [Arm::new(base.with_kind(kind), scheme), Arm::new(base, scheme)];
    let est = estimate_coupled(params, &cfg.x, cfg.t, &arms, &cfg.estimate)?;
    let (gap, se) = est.contrast(&[1.0, -1.0], 0.0);
    Ok(GapRow {
        epsilon: params.epsilon,
        gap,
        se,
        f_eps: f_eps(params),
        decay: (-cfg.t / params.epsilon.powi(2)).exp(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sphere_examples() {
        let f = SphereFlow::new(1.0, 2).unwrap();
        let d = signed_distance(&Point::from_slice(&[1.0, 0.0]), 0.25, &f).unwrap();
        assert!((d - (1.0 - 0.5f64.sqrt())).abs() < 1e-12);
        assert!(signed_distance(&Point::zero(2), 0.1, &f).unwrap() < 0.0);
        assert!(matches!(f.radius(0.5), Err(Error::FlowExtinct { .. })));
    }

    #[test]
    fn shift_outside_band_is_identity() {
        let f = SphereFlow::new(1.0, 2).unwrap();
        let x = Point::from_slice(&[3.0, 0.0]);
        assert_eq!(z_shift_by(&x, 0.0, &f, 0.1, 0.2).unwrap(), x);
        assert!(matches!(
            z_shift_by(&Point::zero(2), 0.0, &SphereFlow::new(0.1, 2).unwrap(), 0.1, 0.2),
            Err(Error::NormalUndefined(_))
        ));
    }
}
