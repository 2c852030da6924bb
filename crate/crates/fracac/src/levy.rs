//! α-stable laws, truncated α/2-stable subordinators and subordinated
//! Brownian motion, all normalised so the spatial generator is
//! -σ_α I(ε)^{α-2} (-Δ)^{α/2} and the Brownian motion has generator Δ.

use rand::Rng;
use rand_distr::{Distribution, Exp1, Poisson, StandardNormal};
use statrs::function::gamma::{gamma, gamma_li};
use std::f64::consts::PI;

use crate::error::{domain, Result};
use crate::point::Point;
use crate::rng::{Purpose, StreamKey};

pub use crate::params::ModelParams;

/// Default small-jump cutoff as a fraction of the truncation level.
pub const DEFAULT_RESOLUTION_RATIO: f64 = 1e-4;

/// ((2-α)/α)^{α/2} Γ(1-α/2) without domain checks.
pub fn sigma_alpha_formula(alpha: f64) -> f64 {
    ((2.0 - alpha) / alpha).powf(alpha / 2.0) * gamma(1.0 - alpha / 2.0)
}

/// The normalising constant σ_α for 1 < α < 2.
pub fn sigma_alpha(alpha: f64) -> Result<f64> {
    if !(alpha > 1.0 && alpha < 2.0) {
        return domain(format!("sigma_alpha needs 1 < alpha < 2, got {alpha}"));
    }
    Ok(sigma_alpha_formula(alpha))
}

/// Symmetric α-stable variate with characteristic function exp(-|k|^α)
/// (Chambers–Mallows–Stuck).
pub fn standard_stable_1d<R: Rng + ?Sized>(alpha: f64, rng: &mut R) -> f64 {
    let v = loop {
        let u: f64 = rng.random();
        if u > 0.0 {
            break PI * (u - 0.5);
        }
    };
    let w: f64 = Exp1.sample(rng);
    if alpha == 2.0 {
        // The same transform at α = 2 gives 2 sin(V) sqrt(W): variance 2.
        return 2.0 * v.sin() * w.sqrt();
    }
    (alpha * v).sin() / v.cos().powf(1.0 / alpha) * (((1.0 - alpha) * v).cos() / w).powf((1.0 - alpha) / alpha)
}

/// Positive β-stable variate with Laplace transform exp(-λ^β), 0 < β < 1 (Kanter).
pub fn positive_stable<R: Rng + ?Sized>(beta: f64, rng: &mut R) -> f64 {
    let u = loop {
        let u: f64 = rng.random();
        if u > 0.0 {
            break PI * u;
        }
    };
    let e: f64 = Exp1.sample(rng);
    (beta * u).sin() / u.sin().powf(1.0 / beta) * (((1.0 - beta) * u).sin() / e).powf((1.0 - beta) / beta)
}

/// Increment over `dt` of the isotropic process with generator -speed·(-Δ)^{α/2}.
pub fn sample_stable_increment<R: Rng + ?Sized>(params: &ModelParams, dt: f64, dim: usize, rng: &mut R) -> Point {
    let mut p = Point::zero(dim);
    if dt <= 0.0 {
        return p;
    }
    let c = params.speed * dt;
    if params.is_brownian() {
        let sd = (2.0 * c).sqrt();
        for x in p.as_mut_slice() {
            *x = sd * Distribution::<f64>::sample(&StandardNormal, rng);
        }
    } else if dim == 1 {
        p.as_mut_slice()[0] = c.powf(1.0 / params.alpha) * standard_stable_1d(params.alpha, rng);
    } else {
        // X = sqrt(2A) N with A positive (α/2)-stable: E e^{ik·X} = E e^{-A|k|²} = e^{-c|k|^α}.
        let beta = params.alpha / 2.0;
        let a = c.powf(1.0 / beta) * positive_stable(beta, rng);
        let sd = (2.0 * a).sqrt();
        for x in p.as_mut_slice() {
            *x = sd * Distribution::<f64>::sample(&StandardNormal, rng);
        }
    }
    p
}

/// Jump structure of R^ε: Lévy density C y^{-1-α/2} on (0, M], jumps below δ
/// replaced by their mean drift.
#[derive(Clone, Debug, PartialEq)]
pub struct TruncatedSubordinator {
    pub beta: f64,
    /// C = (α/2) K^{α/2} I^{α-2}.
    pub prefactor: f64,
    pub trunc_level: f64,
    pub resolution_delta: f64,
    /// Rate of jumps in [δ, M].
    pub jump_rate: f64,
    /// C ∫₀^δ y^{-α/2} dy.
    pub drift_rate: f64,
    /// Rate of jumps above M in the untruncated subordinator (= I^{-2}).
    pub large_rate: f64,
    delta_pow: f64,
    span_pow: f64,
}

impl TruncatedSubordinator {
    pub fn new(params: &ModelParams, resolution_delta: f64) -> Result<Self> {
        if params.is_brownian() {
            return domain("alpha = 2 has no subordinator");
        }
        let m = params.trunc_level;
        if !(resolution_delta > 0.0 && resolution_delta < m) {
            return domain(format!("resolution_delta {resolution_delta} must lie in (0, {m})"));
        }
        let beta = params.alpha / 2.0;
        let k = params.k_factor();
        let c = beta * k.powf(beta) * params.i_val.powf(params.alpha - 2.0);
        let delta_pow = resolution_delta.powf(-beta);
        let span_pow = delta_pow - m.powf(-beta);
        Ok(TruncatedSubordinator {
            beta,
            prefactor: c,
            trunc_level: m,
            resolution_delta,
            jump_rate: c / beta * span_pow,
            drift_rate: c * resolution_delta.powf(1.0 - beta) / (1.0 - beta),
            large_rate: c / beta * m.powf(-beta),
            delta_pow,
            span_pow,
        })
    }

    pub fn with_ratio(params: &ModelParams, ratio: f64) -> Result<Self> {
        Self::new(params, params.trunc_level * ratio)
    }

    pub fn default_for(params: &ModelParams) -> Result<Self> {
        Self::with_ratio(params, DEFAULT_RESOLUTION_RATIO)
    }

    /// Inverse transform of the truncated Pareto law on [δ, M].
    #[inline]
    pub fn small_jump_size(&self, u: f64) -> f64 {
        (self.delta_pow - u * self.span_pow).powf(-1.0 / self.beta)
    }

    /// Inverse transform of the Pareto tail above M.
    #[inline]
    pub fn large_jump_size(&self, u: f64) -> f64 {
        self.trunc_level * (1.0 - u).powf(-1.0 / self.beta)
    }

    /// Mean of one jump in [δ, M].
    pub fn mean_small_jump(&self) -> f64 {
        let b = self.beta;
        let m = self.trunc_level;
        let d = self.resolution_delta;
        self.prefactor * (m.powf(1.0 - b) - d.powf(1.0 - b)) / (1.0 - b) / self.jump_rate
    }

    /// Increment R^ε_{s+dt} - R^ε_s (drift plus compound Poisson jumps).
    pub fn sample_increment<R: Rng + ?Sized>(&self, dt: f64, rng: &mut R) -> f64 {
        if dt <= 0.0 {
            return 0.0;
        }
        let mut total = self.drift_rate * dt;
        let n = poisson(self.jump_rate * dt, rng);
        for _ in 0..n {
            total += self.small_jump_size(rng.random());
        }
        total
    }

    /// Sum of the jumps above M over [0, dt], and the first such jump time.
    /// Gaps and sizes alternate on the same stream, so the first gap is the
    /// same whether or not the sizes are used.
    pub fn sample_large_increment<R: Rng + ?Sized>(&self, dt: f64, rng: &mut R) -> (f64, f64) {
        let first: f64 = Exp1.sample(rng);
        let first = first / self.large_rate;
        let mut t = first;
        let mut total = 0.0;
        while t < dt {
            total += self.large_jump_size(rng.random());
            let gap: f64 = Exp1.sample(rng);
            t += gap / self.large_rate;
        }
        (total, first)
    }

    /// A truncated path on [0, horizon].
    pub fn sample_path<R: Rng + ?Sized>(&self, horizon: f64, rng: &mut R) -> SubordinatorPath {
        let n = poisson(self.jump_rate * horizon.max(0.0), rng);
        let mut jumps: Vec<(f64, f64)> = (0..n)
            .map(|_| {
                let t = horizon * rng.random::<f64>();
                (t, self.small_jump_size(rng.random()))
            })
            .collect();
        jumps.sort_by(|a, b| a.0.total_cmp(&b.0));
        SubordinatorPath {
            horizon,
            resolution_delta: self.resolution_delta,
            trunc_level: self.trunc_level,
            drift_rate: self.drift_rate,
            jumps,
            large_jumps: Vec::new(),
        }
    }
}

fn poisson<R: Rng + ?Sized>(mean: f64, rng: &mut R) -> u64 {
    if mean <= 0.0 {
        return 0;
    }
    Poisson::new(mean).map(|d| d.sample(rng) as u64).unwrap_or(0)
}

/// One realised subordinator path: drift plus recorded jumps.
#[derive(Clone, Debug, PartialEq)]
pub struct SubordinatorPath {
    pub horizon: f64,
    pub resolution_delta: f64,
    pub trunc_level: f64,
    pub drift_rate: f64,
    /// Jumps in [δ, M], ordered by time.
    pub jumps: Vec<(f64, f64)>,
    /// Jumps above M (empty for R^ε itself), ordered by time.
    pub large_jumps: Vec<(f64, f64)>,
}

impl SubordinatorPath {
    pub fn value_at(&self, t: f64) -> f64 {
        let t = t.clamp(0.0, self.horizon);
        let sum = |js: &[(f64, f64)]| js.iter().take_while(|(s, _)| *s <= t).map(|(_, y)| y).sum::<f64>();
        self.drift_rate * t + sum(&self.jumps) + sum(&self.large_jumps)
    }

    pub fn is_truncated(&self) -> bool {
        self.large_jumps.is_empty()
    }

    /// The same path with the jumps above the truncation level removed.
    pub fn truncated(&self) -> SubordinatorPath {
        SubordinatorPath { large_jumps: Vec::new(), ..self.clone() }
    }

    /// First time a jump above the truncation level occurs, if any.
    pub fn first_large_jump(&self) -> Option<f64> {
        self.large_jumps.first().map(|j| j.0)
    }
}

/// R^ε on [0, horizon] with small-jump cutoff `resolution_delta`.
pub fn sample_truncated_subordinator<R: Rng + ?Sized>(
    params: &ModelParams,
    horizon: f64,
    resolution_delta: f64,
    rng: &mut R,
) -> Result<SubordinatorPath> {
    Ok(TruncatedSubordinator::new(params, resolution_delta)?.sample_path(horizon, rng))
}

/// Arrival times in [0, horizon] of jumps above the truncation level of the
/// untruncated subordinator: a Poisson process of rate I^{-2}.
pub fn large_jump_arrivals<R: Rng + ?Sized>(params: &ModelParams, horizon: f64, rng: &mut R) -> Vec<f64> {
    let rate = params.large_jump_rate();
    let mut out = Vec::new();
    let mut t = 0.0;
    loop {
        let gap: f64 = Exp1.sample(rng);
        t += gap / rate;
        if t > horizon {
            return out;
        }
        out.push(t);
    }
}

/// The full subordinator on [0, horizon], built as the truncated path drawn
/// from `key`'s small-jump stream plus independent large jumps from its
/// large-jump stream. `truncated()` of the result is bit-identical to the
/// path sampled with `truncated = true`.
pub fn sample_coupled_subordinator(
    law: &TruncatedSubordinator,
    horizon: f64,
    truncated: bool,
    key: StreamKey,
) -> SubordinatorPath {
    let mut path = law.sample_path(horizon, &mut key.rng(Purpose::SmallJumps));
    if !truncated {
        let mut rng = key.rng(Purpose::LargeJumps);
        let mut t = 0.0;
        loop {
            let gap: f64 = Exp1.sample(&mut rng);
            t += gap / law.large_rate;
            if t > horizon {
                break;
            }
            path.large_jumps.push((t, law.large_jump_size(rng.random())));
        }
    }
    path
}

/// ∫₀^M (e^{-λy} - 1) C y^{-1-α/2} dy by quadrature, valid for any real λ.
///
/// With y = M w^p, p = 1/(1-α/2), the singular weight becomes constant and the
/// integrand (e^{-λy} - 1)/y is smooth on [0, 1].
pub fn laplace_exponent_quadrature(params: &ModelParams, lambda: f64) -> f64 {
    let beta = params.alpha / 2.0;
    let m = params.trunc_level;
    let c = beta * params.k_factor().powf(beta) * params.i_val.powf(params.alpha - 2.0);
    let p = 1.0 / (1.0 - beta);
    let h = |w: f64| {
        let y = m * w.powf(p);
        if y == 0.0 {
            -lambda
        } else {
            (-lambda * y).exp_m1() / y
        }
    };
    // Composite Simpson on [0, 1].
    let n = 4096;
    let dw = 1.0 / n as f64;
    let mut acc = h(0.0) + h(1.0);
    for i in 1..n {
        let w = i as f64 * dw;
        acc += if i % 2 == 1 { 4.0 } else { 2.0 } * h(w);
    }
    c * m.powf(1.0 - beta) * p * acc * dw / 3.0
}

/// φ(λ) = E[exp(-λ R^ε_s)]: closed form with the lower incomplete gamma for
/// λ > 0, quadrature of the Lévy exponent for λ < 0.
pub fn laplace_transform(params: &ModelParams, s: f64, lambda: f64) -> f64 {
    if lambda == 0.0 || s == 0.0 {
        return 1.0;
    }
    if lambda < 0.0 {
        return (s * laplace_exponent_quadrature(params, lambda)).exp();
    }
    let a = params.alpha;
    let k = params.k_factor();
    let i2 = params.i_val * params.i_val;
    let x = k * lambda * i2;
    let jump_term = -s / i2 * (-x).exp_m1();
    let gamma_term = k.powf(a / 2.0) * params.i_val.powf(a - 2.0) * lambda.powf(a / 2.0) * s * gamma_li(1.0 - a / 2.0, x);
    (jump_term - gamma_term).exp()
}

/// Explicit upper bound on E[(R^ε_s)^{-q}]:
/// (1/(qΓ(q))) e^{((2-α)/α)s} (1 + (2q/α)(α/(2s))^{2q/α} Γ(2q/α)).
pub fn neg_moment_bound(params: &ModelParams, s: f64, q: f64) -> f64 {
    let a = params.alpha;
    let r = 2.0 * q / a;
    1.0 / (q * gamma(q)) * (params.k_factor() * s).exp() * (1.0 + r * (a / (2.0 * s)).powf(r) * gamma(r))
}

/// Transition density (4πr)^{-d/2} exp(-|x-y|²/4r) of Brownian motion with generator Δ.
pub fn heat_kernel(r: f64, x: &[f64], y: &[f64]) -> f64 {
    let d = x.len() as f64;
    let dist2: f64 = x.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum();
    (4.0 * PI * r).powf(-d / 2.0) * (-dist2 / (4.0 * r)).exp()
}

/// W(R_t) at the requested times, with the path and Gaussian draws exposed.
#[derive(Clone, Debug)]
pub struct SubordinatedSample {
    pub positions: Vec<Point>,
    pub path: SubordinatorPath,
    /// Standard normal vectors; the increment over the i-th interval is
    /// sqrt(2 ΔR_i) · normals[i].
    pub normals: Vec<Point>,
}

/// Brownian motion (generator Δ) subordinated by R^ε (or by the full
/// subordinator when `truncated` is false). Runs sharing `key` share the
/// Gaussian draws and the truncated part of the subordinator.
pub fn sample_subordinated_bm(
    params: &ModelParams,
    times: &[f64],
    dim: usize,
    truncated: bool,
    resolution_delta: f64,
    key: StreamKey,
) -> Result<SubordinatedSample> {
    if times.windows(2).any(|w| w[1] < w[0]) || times.first().is_some_and(|t| *t < 0.0) {
        return domain("times must be nondecreasing and start at a nonnegative value");
    }
    let law = TruncatedSubordinator::new(params, resolution_delta)?;
    let horizon = times.last().copied().unwrap_or(0.0);
    let path = sample_coupled_subordinator(&law, horizon, truncated, key);
    let mut gauss = key.rng(Purpose::Gaussian);
    let mut positions = Vec::with_capacity(times.len());
    let mut normals = Vec::with_capacity(times.len());
    let mut pos = Point::zero(dim);
    let mut prev_r = 0.0;
    for &t in times {
        let r = path.value_at(t);
        let mut n = Point::zero(dim);
        for c in n.as_mut_slice() {
            *c = StandardNormal.sample(&mut gauss);
        }
        pos = pos + n * (2.0 * (r - prev_r)).sqrt();
        prev_r = r;
        positions.push(pos);
        normals.push(n);
    }
    Ok(SubordinatedSample { positions, path, normals })
}
