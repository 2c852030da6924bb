//! Model parameters and the scaling function I(ε).

use crate::error::{domain, Error, Result};
use crate::levy::sigma_alpha;
use crate::voting::fixed_points;

/// The scaling function I(ε) that sets the subordinator truncation.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum ScalingPreset {
    /// I(ε) = ε|log ε|.
    LogExample,
    /// I(ε) = ε^q with q = (3α+1)/(2α(1+α)).
    PowerExample,
    /// I(ε) = ε^δ with 1/α < δ < 1.
    Power(f64),
}

impl ScalingPreset {
    /// Checks the preset against α (only `Power` has a constraint).
    pub fn validate(&self, alpha: f64) -> Result<()> {
        if let ScalingPreset::Power(d) = *self {
            if !(d > 1.0 / alpha && d < 1.0) {
                return domain(format!("Power exponent {d} must lie in (1/alpha, 1) = ({}, 1)", 1.0 / alpha));
            }
        }
        Ok(())
    }

    pub fn power_example_exponent(alpha: f64) -> f64 {
        (3.0 * alpha + 1.0) / (2.0 * alpha * (1.0 + alpha))
    }

    /// I(ε) for this preset.
    pub fn eval(&self, alpha: f64, eps: f64) -> f64 {
        match *self {
            ScalingPreset::LogExample => eps * eps.ln().abs(),
            ScalingPreset::PowerExample => eps.powf(Self::power_example_exponent(alpha)),
            ScalingPreset::Power(d) => eps.powf(d),
        }
    }

    pub fn name(&self) -> String {
        match *self {
            ScalingPreset::LogExample => "log".into(),
            ScalingPreset::PowerExample => "power-example".into(),
            ScalingPreset::Power(d) => format!("power:{d}"),
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s.trim() {
            "log" => Ok(ScalingPreset::LogExample),
            "power-example" => Ok(ScalingPreset::PowerExample),
            other => match other.strip_prefix("power:").map(str::parse::<f64>) {
                Some(Ok(d)) => Ok(ScalingPreset::Power(d)),
                _ => domain(format!("unknown scaling preset '{other}'")),
            },
        }
    }
}

/// α, ε, the preset, and every constant derived from them.
#[derive(Clone, Debug, PartialEq)]
pub struct ModelParams {
    pub alpha: f64,
    pub epsilon: f64,
    pub scaling: ScalingPreset,
    pub i_val: f64,
    pub sigma_alpha: f64,
    /// σ_α I^{α-2}: the generator is -speed·(-Δ)^{α/2}.
    pub speed: f64,
    /// ε^{-2}.
    pub branch_rate: f64,
    /// ((2-α)/α) I²; zero in the Brownian case.
    pub trunc_level: f64,
    pub b_eps: f64,
    /// (u₋, u₊) when b_ε < 1/3.
    pub phases: Option<(f64, f64)>,
}

impl ModelParams {
    pub fn new(alpha: f64, epsilon: f64, scaling: ScalingPreset) -> Result<Self> {
        if !(alpha > 1.0 && alpha <= 2.0) {
            return domain(format!("alpha = {alpha} outside (1, 2]"));
        }
        if !(epsilon > 0.0 && epsilon < 1.0) {
            return domain(format!("epsilon = {epsilon} outside (0, 1)"));
        }
        scaling.validate(alpha)?;
        let i_val = scaling.eval(alpha, epsilon);
        if !(i_val > 0.0 && i_val.is_finite()) {
            return domain(format!("I(eps) = {i_val} is not positive"));
        }
        let brownian = alpha == 2.0;
        let sigma = if brownian { 1.0 } else { sigma_alpha(alpha)? };
        let speed = sigma * i_val.powf(alpha - 2.0);
        let trunc_level = (2.0 - alpha) / alpha * i_val * i_val;
        let b_eps = epsilon * epsilon / (epsilon * epsilon + i_val * i_val);
        let phases = fixed_points(b_eps).ok().map(|(lo, _, hi)| (lo, hi));
        Ok(ModelParams {
            alpha,
            epsilon,
            scaling,
            i_val,
            sigma_alpha: sigma,
            speed,
            branch_rate: 1.0 / (epsilon * epsilon),
            trunc_level,
            b_eps,
            phases,
        })
    }

    pub fn is_brownian(&self) -> bool {
        self.alpha == 2.0
    }

    /// (2-α)/α.
    pub fn k_factor(&self) -> f64 {
        (2.0 - self.alpha) / self.alpha
    }

    pub fn log_eps(&self) -> f64 {
        self.epsilon.ln().abs()
    }

    /// I(ε)|log ε|, the interface width scale. At α = 2 the scaling
    /// function drops out of the dynamics and the width is ε|log ε|.
    pub fn interface_scale(&self) -> f64 {
        if self.is_brownian() {
            self.epsilon * self.log_eps()
        } else {
            self.i_val * self.log_eps()
        }
    }

    /// Rate I^{-2} of subordinator jumps above the truncation level.
    pub fn large_jump_rate(&self) -> f64 {
        1.0 / (self.i_val * self.i_val)
    }

    /// (u₋, u₊), or a domain error when b_ε ≥ 1/3.
    pub fn u_pm(&self) -> Result<(f64, f64)> {
        self.phases.ok_or_else(|| {
            Error::Domain(format!("b_eps = {:.4} >= 1/3: the marked fixed points do not exist", self.b_eps))
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn b_eps_matches_rate_ratio() {
        let p = ModelParams::new(1.5, 0.1, ScalingPreset::LogExample).unwrap();
        let i2 = p.i_val * p.i_val;
        let ratio = (1.0 / i2) / (1.0 / i2 + 1.0 / 0.01);
        assert!((p.b_eps - ratio).abs() < 1e-15);
        let (lo, hi) = p.u_pm().unwrap();
        assert!((lo + hi - 1.0).abs() < 1e-15);
    }

    #[test]
    fn power_preset_bounds() {
        assert!(ModelParams::new(1.5, 0.1, ScalingPreset::Power(0.6)).is_err());
        assert!(ModelParams::new(1.5, 0.1, ScalingPreset::Power(0.7)).is_ok());
        let q = ScalingPreset::power_example_exponent(1.5);
        assert!((q - 5.5 / 7.5).abs() < 1e-15);
    }

    #[test]
    fn large_eps_has_no_phases() {
        let p = ModelParams::new(1.5, 0.3, ScalingPreset::LogExample).unwrap();
        assert!(p.b_eps > 1.0 / 3.0);
        assert!(p.u_pm().is_err());
    }

    #[test]
    fn preset_names_round_trip() {
        for s in [ScalingPreset::LogExample, ScalingPreset::PowerExample, ScalingPreset::Power(0.8)] {
            assert_eq!(ScalingPreset::parse(&s.name()).unwrap(), s);
        }
    }
}
