use fracac::levy::*;
use fracac::*;
use proptest::prelude::*;
use rand::rngs::SmallRng;
use rand::{Rng, SeedableRng};

fn params(alpha: f64, eps: f64) -> ModelParams {
    ModelParams::new(alpha, eps, ScalingPreset::LogExample).unwrap()
}

fn mean_se(xs: &[f64]) -> (f64, f64) {
    fracac::stats::mean_se(xs)
}

fn ks_statistic(a: &mut [f64], b: &mut [f64]) -> f64 {
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    let (mut i, mut j, mut d) = (0, 0, 0.0f64);
    while i < a.len() && j < b.len() {
        if a[i] <= b[j] {
            i += 1;
        } else {
            j += 1;
        }
        d = d.max((i as f64 / a.len() as f64 - j as f64 / b.len() as f64).abs());
    }
    d
}

#[test]
fn sigma_alpha_at_one_and_a_half() {
    assert!((sigma_alpha(1.5).unwrap() - 1.5907).abs() < 1e-3);
}

#[test]
fn truncated_mean_is_s() {
    for (alpha, eps, s) in [(1.5, 0.1, 0.05), (1.7, 0.2, 0.3), (1.2, 0.15, 0.3)] {
        let p = params(alpha, eps);
        let law = TruncatedSubordinator::default_for(&p).unwrap();
        let mut rng = SmallRng::seed_from_u64(11);
        let xs: Vec<f64> = (0..20_000).map(|_| law.sample_increment(s, &mut rng)).collect();
        let (m, se) = mean_se(&xs);
        assert!((m - s).abs() <= 3.0 * se, "{alpha} {eps}: {m} vs {s} (se {se})");
    }
}

#[test]
fn laplace_transform_matches_simulation() {
    let p = params(1.5, 0.1);
    let s = 0.2;
    let law = TruncatedSubordinator::default_for(&p).unwrap();
    let mut rng = SmallRng::seed_from_u64(5);
    let rs: Vec<f64> = (0..20_000).map(|_| law.sample_increment(s, &mut rng)).collect();
    for lambda in [0.5, 1.0, 5.0] {
        let xs: Vec<f64> = rs.iter().map(|r| (-lambda * r).exp()).collect();
        let (m, se) = mean_se(&xs);
        let phi = laplace_transform(&p, s, lambda);
        assert!((m - phi).abs() <= 3.0 * se + 1e-12, "{lambda}: {m} vs {phi}");
    }
    assert_eq!(laplace_transform(&p, s, 0.0), 1.0);
    let h = 1e-6;
    let slope = -(laplace_transform(&p, s, h) - laplace_transform(&p, s, -h)) / (2.0 * h);
    assert!((slope - s).abs() < 1e-6, "{slope}");
}

#[test]
fn large_jump_arrivals_are_poisson() {
    let p = params(1.5, 0.1);
    let horizon = 0.3;
    let mu = horizon * p.large_jump_rate();
    let mut rng = SmallRng::seed_from_u64(9);
    let counts: Vec<f64> = (0..20_000).map(|_| large_jump_arrivals(&p, horizon, &mut rng).len() as f64).collect();
    let (m, se) = mean_se(&counts);
    assert!((m - mu).abs() <= 3.0 * se);
    let empty = counts.iter().filter(|&&c| c == 0.0).count() as f64 / counts.len() as f64;
    let q = (-mu).exp();
    assert!((empty - q).abs() <= 3.0 * (q * (1.0 - q) / counts.len() as f64).sqrt());
    assert!(large_jump_arrivals(&p, 0.0, &mut rng).is_empty());
}

#[test]
fn negative_moments_below_bound() {
    let p = params(1.5, 0.1);
    let law = TruncatedSubordinator::default_for(&p).unwrap();
    let mut rng = SmallRng::seed_from_u64(2);
    for (s, q) in [(0.1, 0.5), (0.1, 1.5), (0.3, 1.0)] {
        let xs: Vec<f64> = (0..20_000).map(|_| law.sample_increment(s, &mut rng).powf(-q)).collect();
        let (m, se) = mean_se(&xs);
        let bound = neg_moment_bound(&p, s, q);
        assert!(bound.is_finite() && bound > 0.0);
        assert!(m <= bound + 3.0 * se, "s={s} q={q}: {m} > {bound}");
    }
}

#[test]
fn stable_increments_are_symmetric_and_self_similar() {
    let p = params(1.5, 0.3);
    let mut rng = SmallRng::seed_from_u64(4);
    let n = 20_000;
    let mut a: Vec<f64> = (0..n).map(|_| sample_stable_increment(&p, 0.1, 1, &mut rng).x()).collect();
    let pos = a.iter().filter(|x| **x > 0.0).count() as f64 / n as f64;
    assert!((pos - 0.5).abs() <= 3.0 * (0.25 / n as f64).sqrt());
    // X_{2dt} has the law of 2^{1/α} X_{dt}.
    let mut b: Vec<f64> =
        (0..n).map(|_| sample_stable_increment(&p, 0.2, 1, &mut rng).x() / 2f64.powf(1.0 / 1.5)).collect();
    let d = ks_statistic(&mut a, &mut b);
    assert!(d < 1.628 * (2.0 / n as f64).sqrt(), "ks {d}");
}

#[test]
fn brownian_variance() {
    let p = ModelParams::new(2.0, 0.3, ScalingPreset::LogExample).unwrap();
    let mut rng = SmallRng::seed_from_u64(8);
    let dt = 0.05;
    let xs: Vec<f64> = (0..20_000).map(|_| sample_stable_increment(&p, dt, 1, &mut rng).x().powi(2)).collect();
    let (m, se) = mean_se(&xs);
    assert!((m - 2.0 * p.speed * dt).abs() <= 3.0 * se);
}

#[test]
fn full_subordination_gives_the_stable_law() {
    let p = params(1.5, 0.2);
    let t = 0.05;
    let n = 10_000;
    let mut rng = SmallRng::seed_from_u64(3);
    let mut a: Vec<f64> = (0..n).map(|_| sample_stable_increment(&p, t, 1, &mut rng).x()).collect();
    let mut b: Vec<f64> = (0..n as u64)
        .map(|i| {
            sample_subordinated_bm(&p, &[t], 1, false, p.trunc_level * 1e-3, StreamKey::replicate(1, i)).unwrap().positions
                [0]
            .x()
        })
        .collect();
    let d = ks_statistic(&mut a, &mut b);
    assert!(d < 1.628 * (2.0 / n as f64).sqrt(), "ks {d}");
}

#[test]
fn truncated_subordinated_variance() {
    let p = params(1.5, 0.2);
    let t = 0.1;
    let xs: Vec<f64> = (0..20_000u64)
        .map(|i| {
            let s = sample_subordinated_bm(&p, &[t], 1, true, p.trunc_level * 1e-3, StreamKey::replicate(4, i)).unwrap();
            s.positions[0].x().powi(2)
        })
        .collect();
    let (m, se) = mean_se(&xs);
    assert!((m - 2.0 * t).abs() <= 3.0 * se, "{m}");
}

#[test]
fn heat_kernel_integrates_to_one() {
    let r = 0.3;
    let h = 1e-3;
    let total: f64 = (-10_000..=10_000).map(|i| heat_kernel(r, &[0.1], &[i as f64 * h]) * h).sum();
    assert!((total - 1.0).abs() < 1e-8);
}

proptest! {
    #[test]
    fn heat_kernel_is_lipschitz(
        r in 0.01f64..2.0,
        x in prop::array::uniform2(-2.0f64..2.0),
        y in prop::array::uniform2(-2.0f64..2.0),
        z in prop::array::uniform2(-1.0f64..1.0),
        two_d in any::<bool>(),
    ) {
        let d = if two_d { 2 } else { 1 };
        let yz: Vec<f64> = (0..d).map(|i| y[i] + z[i]).collect();
        let zn = z[..d].iter().map(|c| c * c).sum::<f64>().sqrt();
        let lhs = (heat_kernel(r, &x[..d], &y[..d]) - heat_kernel(r, &x[..d], &yz)).abs();
        let c = (4.0 * std::f64::consts::PI).powf(-(d as f64) / 2.0);
        prop_assert!(lhs <= c * r.powf(-(d as f64 + 1.0) / 2.0) * zn);
    }

    #[test]
    fn paths_are_monotone_and_couple(seed in any::<u64>(), t in 0.0f64..0.5) {
        let p = params(1.6, 0.15);
        let law = TruncatedSubordinator::with_ratio(&p, 1e-2).unwrap();
        let key = StreamKey::new(seed);
        let full = sample_coupled_subordinator(&law, 0.5, false, key);
        let trunc = sample_coupled_subordinator(&law, 0.5, true, key);
        prop_assert_eq!(full.truncated(), trunc.clone());
        prop_assert!(full.value_at(t) >= trunc.value_at(t));
        prop_assert!(trunc.value_at(t) <= trunc.value_at((t + 0.1).min(0.5)));
        prop_assert!(trunc.jumps.iter().all(|j| j.1 <= law.trunc_level));
        prop_assert_eq!(trunc.value_at(0.0), 0.0);
    }

    #[test]
    fn resolution_must_be_below_truncation(ratio in 1.0f64..3.0) {
        let p = params(1.5, 0.1);
        prop_assert!(TruncatedSubordinator::with_ratio(&p, ratio).is_err());
    }
}

#[test]
fn rate_identity_integrates_to_one() {
    let mut rng = SmallRng::seed_from_u64(0);
    for _ in 0..20 {
        let alpha = rng.random_range(1.05..1.95);
        let eps = rng.random_range(0.01..0.3);
        let law = TruncatedSubordinator::default_for(&params(alpha, eps)).unwrap();
        let m = law.trunc_level;
        // ∫₀^M y C y^{-1-α/2} dy
        let b = alpha / 2.0;
        assert!((law.prefactor * m.powf(1.0 - b) / (1.0 - b) - 1.0).abs() < 1e-12);
    }
}
