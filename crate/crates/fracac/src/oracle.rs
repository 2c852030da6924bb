//! Periodic pseudo-spectral solver for the scaled fractional Allen–Cahn
//! equation ∂ₜu = -σ_α I^{α-2}(-Δ)^{α/2}u + ε⁻²u(1-u)(2u-1) in 1D and 2D.
//!
//! The linear part is integrated exactly per mode and the reaction by
//! second-order exponential time differencing (ETD-RK2).

use crate::error::{Error, Result};
use crate::estimator::{estimate_u, Estimate, EstimateConfig};
use crate::params::ModelParams;
use crate::point::Point;
use crate::tree::{MotionKind, MotionSpec};
use crate::voting::{InitialCondition, Region, SchemeKind, VoteScheme};
use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use std::f64::consts::PI;
use std::io::{Read, Write};
use std::sync::Arc;

/// Values on the periodic grid -L + i·h, h = 2L/N, per axis; 2D is row-major (y, x).
#[derive(Clone, Debug, PartialEq)]
pub struct GridField {
    pub dim: usize,
    pub half_width: f64,
    pub n: usize,
    pub values: Vec<f64>,
    pub time: f64,
}

/// ½(1 + tanh(x/w)), or the sharp step when w = 0.
fn smooth_step(x: f64, w: f64) -> f64 {
    if w > 0.0 {
        0.5 * (1.0 + (x / w).tanh())
    } else if x >= 0.0 {
        1.0
    } else {
        0.0
    }
}

impl GridField {
    pub fn new(dim: usize, half_width: f64, n: usize, values: Vec<f64>, time: f64) -> Result<Self> {
        if !(dim == 1 || dim == 2) {
            return Err(Error::Domain(format!("grid fields are 1D or 2D, got {dim}")));
        }
        if !n.is_power_of_two() || n < 4 {
            return Err(Error::Domain(format!("N must be a power of two >= 4, got {n}")));
        }
        if !(half_width > 0.0) {
            return Err(Error::Domain("half width must be positive".into()));
        }
        if values.len() != n.pow(dim as u32) {
            return Err(Error::Domain("value count does not match the grid".into()));
        }
        Ok(GridField { dim, half_width, n, values, time })
    }

    pub fn from_fn(dim: usize, half_width: f64, n: usize, f: impl Fn(&[f64]) -> f64) -> Result<Self> {
        let h = 2.0 * half_width / n as f64;
        let c = |i: usize| -half_width + i as f64 * h;
        let values = if dim == 1 {
            (0..n).map(|i| f(&[c(i)])).collect()
        } else {
            (0..n * n).map(|k| f(&[c(k % n), c(k / n)])).collect()
        };
        GridField::new(dim, half_width, n, values, 0.0)
    }

    /// Periodised step lo→hi at 0 (and hi→lo at ±L), smoothed over
    /// `smoothing_cells` grid cells. Antisymmetric about (0, (hi+lo)/2).
    pub fn step_1d(half_width: f64, n: usize, smoothing_cells: f64, hi: f64, lo: f64) -> Result<Self> {
        let w = smoothing_cells * 2.0 * half_width / n as f64;
        let l = half_width;
        GridField::from_fn(1, half_width, n, |x| {
            let x = x[0];
            let s = if x >= 0.0 {
                smooth_step(x, w) + smooth_step(l - x, w) - 1.0
            } else {
                smooth_step(x, w) + smooth_step(-l - x, w)
            };
            lo + (hi - lo) * s
        })
    }

    /// `inside` within radius r0 and `outside` beyond it, smoothed radially.
    pub fn radial_step(half_width: f64, n: usize, r0: f64, smoothing_cells: f64, inside: f64, outside: f64) -> Result<Self> {
        let w = smoothing_cells * 2.0 * half_width / n as f64;
        GridField::from_fn(2, half_width, n, |x| inside + (outside - inside) * smooth_step(x[0].hypot(x[1]) - r0, w))
    }

    pub fn spacing(&self) -> f64 {
        2.0 * self.half_width / self.n as f64
    }

    pub fn coord(&self, i: usize) -> f64 {
        -self.half_width + i as f64 * self.spacing()
    }

    /// Periodic linear interpolation of a 1D field.
    pub fn value_at(&self, x: f64) -> f64 {
        assert_eq!(self.dim, 1);
        let h = self.spacing();
        let u = (x + self.half_width) / h;
        let i0 = u.floor();
        let frac = u - i0;
        let n = self.n as i64;
        let i = (i0 as i64).rem_euclid(n) as usize;
        let j = (i + 1) % self.n;
        self.values[i] * (1.0 - frac) + self.values[j] * frac
    }

    /// Flat binary snapshot: dim, N as u64; L, time as f64; then the values, all little endian.
    pub fn write_snapshot<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        w.write_all(&(self.dim as u64).to_le_bytes())?;
        w.write_all(&(self.n as u64).to_le_bytes())?;
        w.write_all(&self.half_width.to_le_bytes())?;
        w.write_all(&self.time.to_le_bytes())?;
        for v in &self.values {
            w.write_all(&v.to_le_bytes())?;
        }
        Ok(())
    }

    pub fn read_snapshot<R: Read>(mut r: R) -> Result<Self> {
        let mut b = [0u8; 8];
        let mut next = |r: &mut R| -> Result<[u8; 8]> {
            r.read_exact(&mut b).map_err(|e| Error::Domain(format!("snapshot: {e}")))?;
            Ok(b)
        };
        let dim = u64::from_le_bytes(next(&mut r)?) as usize;
        let n = u64::from_le_bytes(next(&mut r)?) as usize;
        let half_width = f64::from_le_bytes(next(&mut r)?);
        let time = f64::from_le_bytes(next(&mut r)?);
        if dim == 0 || dim > 2 || n == 0 || n > 1 << 24 {
            return Err(Error::Domain("corrupt snapshot header".into()));
        }
        let values = (0..n.pow(dim as u32))
            .map(|_| Ok(f64::from_le_bytes(next(&mut r)?)))
            .collect::<Result<Vec<_>>>()?;
        GridField::new(dim, half_width, n, values, time)
    }

    /// `x,u` rows; for 2D the cut is the row y = 0.
    pub fn line_cut_csv(&self) -> String {
        let mut out = String::from("x,u\n");
        let row = if self.dim == 2 { self.n / 2 * self.n } else { 0 };
        for i in 0..self.n {
            out.push_str(&format!("{},{}\n", self.coord(i), self.values[row + i]));
        }
        out
    }
}

/// Angular wavenumbers of an N-point grid on a period of length 2L, FFT order.
pub fn wavenumbers(n: usize, half_width: f64) -> Vec<f64> {
    let base = PI / half_width;
    (0..n)
        .map(|j| if j < n / 2 { j as f64 } else { j as f64 - n as f64 })
        .map(|j| j * base)
        .collect()
}

/// Fourier symbol of the linear operator: -σ_α I^{α-2}|k|^α.
pub fn fractional_multiplier(params: &ModelParams, ks: &[f64]) -> Vec<f64> {
    ks.iter().map(|k| -params.speed * k.abs().powf(params.alpha)).collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Reaction {
    AllenCahn,
    /// Linear equation only.
    None,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Solution {
    pub snapshots: Vec<GridField>,
    /// Largest excursion outside [0, 1] before clipping.
    pub max_overshoot: f64,
    /// Largest imaginary part after an inverse transform.
    pub max_imag: f64,
    pub steps: u64,
}

struct Spectral {
    dim: usize,
    n: usize,
    fwd: Arc<dyn Fft<f64>>,
    inv: Arc<dyn Fft<f64>>,
    scratch: Vec<Complex64>,
}

impl Spectral {
    fn new(dim: usize, n: usize) -> Self {
        let mut planner = FftPlanner::new();
        let fwd = planner.plan_fft_forward(n);
        let inv = planner.plan_fft_inverse(n);
        Spectral { dim, n, fwd, inv, scratch: vec![Complex64::new(0.0, 0.0); n.pow(dim as u32)] }
    }

    fn transpose(&mut self, a: &mut [Complex64]) {
        let n = self.n;
        for i in 0..n {
            for j in 0..n {
                self.scratch[j * n + i] = a[i * n + j];
            }
        }
        a.copy_from_slice(&self.scratch);
    }

    fn apply(&mut self, a: &mut [Complex64], forward: bool) {
        let plan = if forward { self.fwd.clone() } else { self.inv.clone() };
        plan.process(a);
        if self.dim == 2 {
            self.transpose(a);
            plan.process(a);
            self.transpose(a);
        }
        if !forward {
            let s = 1.0 / a.len() as f64;
            for v in a.iter_mut() {
                *v *= s;
            }
        }
    }
}

fn symbol_grid(params: &ModelParams, dim: usize, n: usize, half_width: f64) -> Vec<f64> {
    let ks = wavenumbers(n, half_width);
    if dim == 1 {
        fractional_multiplier(params, &ks)
    } else {
        let mut out = Vec::with_capacity(n * n);
        for ky in &ks {
            for kx in &ks {
                out.push(-params.speed * kx.hypot(*ky).powf(params.alpha));
            }
        }
        out
    }
}

/// (e^z, φ₁(z), φ₂(z)) with φ₁ = (e^z-1)/z, φ₂ = (e^z-1-z)/z².
fn etd_coefficients(z: f64) -> (f64, f64, f64) {
    if z.abs() < 1e-4 {
        (z.exp(), 1.0 + z / 2.0 + z * z / 6.0, 0.5 + z / 6.0 + z * z / 24.0)
    } else {
        let em1 = z.exp_m1();
        (z.exp(), em1 / z, (em1 - z) / (z * z))
    }
}

pub fn solve(params: &ModelParams, initial: &GridField, t_end: f64, dt: f64, snapshot_times: &[f64]) -> Result<Solution> {
    solve_with(params, initial, t_end, dt, snapshot_times, Reaction::AllenCahn)
}

/// Integrate from `initial` (taken at time 0) to t_end, recording the field
/// at each requested time (steps are shortened to land on them exactly).
pub fn solve_with(
    params: &ModelParams,
    initial: &GridField,
    t_end: f64,
    dt: f64,
    snapshot_times: &[f64],
    reaction: Reaction,
) -> Result<Solution> {
    let bound = 0.1 * params.epsilon.powi(2);
    if !(dt > 0.0) || (reaction == Reaction::AllenCahn && dt > bound) {
        return Err(Error::Cfl { dt, bound });
    }
    if !(t_end >= 0.0) {
        return Err(Error::Domain("t_end must be >= 0".into()));
    }
    let mut stops: Vec<f64> = snapshot_times.iter().cloned().filter(|&s| (0.0..=t_end).contains(&s)).collect();
    stops.sort_by(f64::total_cmp);
    stops.dedup();
    let inv_eps2 = params.epsilon.powi(-2);
    let react = |u: f64| match reaction {
        Reaction::AllenCahn => inv_eps2 * u * (1.0 - u) * (2.0 * u - 1.0),
        Reaction::None => 0.0,
    };
    let (dim, n) = (initial.dim, initial.n);
    let size = initial.values.len();
    let symbol = symbol_grid(params, dim, n, initial.half_width);
    let mut fft = Spectral::new(dim, n);
    let mut u: Vec<f64> = initial.values.clone();
    let mut u_hat: Vec<Complex64> = u.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    fft.apply(&mut u_hat, true);
    let mut n_hat = vec![Complex64::new(0.0, 0.0); size];
    let mut a_hat = vec![Complex64::new(0.0, 0.0); size];
    let mut work = vec![Complex64::new(0.0, 0.0); size];
    let mut coeffs: Vec<(f64, f64, f64)> = Vec::new();
    let mut coeff_h = f64::NAN;
    let mut out = Solution { snapshots: Vec::new(), max_overshoot: 0.0, max_imag: 0.0, steps: 0 };
    let mut now = 0.0;
    for &stop in &stops {
        let span = stop - now;
        let steps = (span / dt).ceil().max(0.0) as u64;
        if steps > 0 {
            let h = span / steps as f64;
            if h != coeff_h {
                coeffs = symbol.iter().map(|&l| etd_coefficients(l * h)).collect();
                coeff_h = h;
            }
            for _ in 0..steps {
                // Stage 1: a = e^{Lh}u + hφ₁N(u).
                for (w, &v) in work.iter_mut().zip(&u) {
                    *w = Complex64::new(react(v), 0.0);
                }
                fft.apply(&mut work, true);
                n_hat.copy_from_slice(&work);
                for k in 0..size {
                    let (e, p1, _) = coeffs[k];
                    a_hat[k] = u_hat[k] * e + n_hat[k] * (h * p1);
                }
                if reaction == Reaction::None {
                    u_hat.copy_from_slice(&a_hat);
                } else {
                    work.copy_from_slice(&a_hat);
                    fft.apply(&mut work, false);
                    for w in work.iter_mut() {
                        *w = Complex64::new(react(w.re), 0.0);
                    }
                    fft.apply(&mut work, true);
                    // Stage 2: correct with hφ₂(N(a) - N(u)).
                    for k in 0..size {
                        let (_, _, p2) = coeffs[k];
                        u_hat[k] = a_hat[k] + (work[k] - n_hat[k]) * (h * p2);
                    }
                }
                work.copy_from_slice(&u_hat);
                fft.apply(&mut work, false);
                let mut clipped = false;
                for (v, w) in u.iter_mut().zip(&work) {
                    if !w.re.is_finite() {
                        return Err(Error::NotFinite(now));
                    }
                    out.max_imag = out.max_imag.max(w.im.abs());
                    let over = (w.re - 1.0).max(-w.re);
                    if over > 0.0 {
                        out.max_overshoot = out.max_overshoot.max(over);
                        if reaction == Reaction::AllenCahn {
                            clipped = true;
                        }
                    }
                    *v = if reaction == Reaction::AllenCahn { w.re.clamp(0.0, 1.0) } else { w.re };
                }
                if clipped {
                    for (c, &v) in u_hat.iter_mut().zip(&u) {
                        *c = Complex64::new(v, 0.0);
                    }
                    fft.apply(&mut u_hat, true);
                }
                out.steps += 1;
            }
        }
        now = stop;
        out.snapshots.push(GridField { values: u.clone(), time: stop, ..initial.clone() });
    }
    Ok(out)
}

/// Oracle discretisation used for duality comparisons.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct OracleConfig {
    pub half_width: f64,
    pub n: usize,
    pub dt: f64,
    pub smoothing_cells: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct DualityRow {
    pub x: f64,
    pub t: f64,
    pub mc: Estimate,
    pub oracle: f64,
    /// |L vs 2L| + |smoothing w vs 2w| + |dt vs dt/2| at the point.
    pub tol_oracle: f64,
    pub diff: f64,
    pub pass: bool,
}

/// Compare tree MC (majority voting, stable motion in 1D) with the oracle at
/// each (x, t). Passes where |MC - oracle| ≤ 3·SE + tol_oracle.
pub fn duality_compare(
    params: &ModelParams,
    scheme: &VoteScheme,
    points: &[(f64, f64)],
    oracle: &OracleConfig,
    mc: &EstimateConfig,
) -> Result<Vec<DualityRow>> {
    if scheme.kind != SchemeKind::Majority || scheme.initial.region != Region::HalfLine {
        return Err(Error::SchemeMismatch("the oracle solves majority voting from a half-line step".into()));
    }
    let InitialCondition { hi, lo, .. } = scheme.initial;
    let mut times: Vec<f64> = points.iter().map(|p| p.1).collect();
    times.sort_by(f64::total_cmp);
    times.dedup();
    let t_end = times.last().cloned().unwrap_or(0.0);
    let run = |l: f64, n: usize, w: f64, dt: f64| -> Result<Solution> {
        let init = GridField::step_1d(l, n, w, hi, lo)?;
        solve(params, &init, t_end, dt, &times)
    };
    let o = oracle;
    let base = run(o.half_width, o.n, o.smoothing_cells, o.dt)?;
    let wide = run(2.0 * o.half_width, 2 * o.n, o.smoothing_cells, o.dt)?;
    let smooth = run(o.half_width, o.n, 2.0 * o.smoothing_cells, o.dt)?;
    let fine = run(o.half_width, o.n, o.smoothing_cells, o.dt / 2.0)?;
    let at = |s: &Solution, x: f64, t: f64| -> f64 {
        let k = times.iter().position(|&u| u == t).expect("time recorded");
        s.snapshots[k].value_at(x)
    };
    let motion = MotionSpec::new(MotionKind::Stable, 1);
    points
        .iter()
        .map(|&(x, t)| {
            let est = estimate_u(params, &Point::from_slice(&[x]), t, &motion, scheme, mc)?;
            let u = at(&base, x, t);
            let tol = (at(&wide, x, t) - u).abs() + (at(&smooth, x, t) - u).abs() + (at(&fine, x, t) - u).abs();
            let diff = (est.p_hat - u).abs();
            let pass = diff <= 3.0 * est.stderr + tol;
            Ok(DualityRow { x, t, mc: est, oracle: u, tol_oracle: tol, diff, pass })
        })
        .collect()
}
