use fracac::estimator::*;
use fracac::tree::*;
use fracac::voting::*;
use fracac::*;

fn params() -> ModelParams {
    ModelParams::new(1.5, 0.3, ScalingPreset::LogExample).unwrap()
}

#[test]
fn worker_count_does_not_change_estimates() {
    let p = params();
    let m = MotionSpec::stable(1);
    let s = VoteScheme::new(SchemeKind::Majority, InitialCondition::step());
    let x = Point::from_slice(&[0.2]);
    let runs: Vec<Estimate> = [1, 4, 8]
        .iter()
        .map(|&w| estimate_u(&p, &x, 0.09, &m, &s, &EstimateConfig::new(4000, 9).with_workers(w)).unwrap())
        .collect();
    assert_eq!(runs[0], runs[1]);
    assert_eq!(runs[0], runs[2]);
}

#[test]
fn trivial_cases_are_exact() {
    let p = params();
    let m = MotionSpec::stable(1);
    let cfg = EstimateConfig::new(2000, 1);
    let one = VoteScheme::new(SchemeKind::Majority, InitialCondition::constant(1.0));
    assert_eq!(estimate_u(&p, &Point::zero(1), 0.09, &m, &one, &cfg).unwrap().p_hat, 1.0);
    let step = VoteScheme::new(SchemeKind::Majority, InitialCondition::step());
    assert_eq!(estimate_u(&p, &Point::from_slice(&[0.4]), 0.0, &m, &step, &cfg).unwrap().p_hat, 1.0);
    assert!(estimate_u(&p, &Point::zero(1), 0.09, &m, &step, &EstimateConfig::new(0, 1)).is_err());
}

#[test]
fn symmetric_start_gives_one_half() {
    let p = params();
    let m = MotionSpec::stable(1);
    let s = VoteScheme::new(SchemeKind::Majority, InitialCondition::step());
    let e = estimate_u(&p, &Point::zero(1), p.epsilon * p.epsilon, &m, &s, &EstimateConfig::new(100_000, 3)).unwrap();
    assert!((e.p_hat - 0.5).abs() <= 3.0 * e.stderr, "{e:?}");
    assert!(e.ci95.0 <= e.p_hat && e.p_hat <= e.ci95.1);
}

#[test]
fn coupling_rules() {
    let p = params();
    let stable = Arm::new(MotionSpec::stable(1), VoteScheme::new(SchemeKind::Majority, InitialCondition::step()));
    let sub = Arm::new(
        MotionSpec::new(MotionKind::SubordinatedTruncated, 1),
        VoteScheme::new(SchemeKind::Majority, InitialCondition::step()),
    );
    let cfg = EstimateConfig::new(1000, 1);
    assert!(matches!(
        estimate_coupled(&p, &Point::zero(1), 0.05, &[stable, sub], &cfg),
        Err(Error::Uncouplable(_))
    ));
    let c = estimate_coupled(&p, &Point::from_slice(&[0.1]), 0.05, &[sub, sub], &cfg).unwrap();
    assert_eq!(c.difference(0, 1), (0.0, 0.0));
}

#[test]
fn long_horizons_are_refused() {
    let p = params();
    let s = VoteScheme::new(SchemeKind::Majority, InitialCondition::step());
    let r = estimate_u(&p, &Point::zero(1), 2.0, &MotionSpec::stable(1), &s, &EstimateConfig::new(10, 1));
    assert!(matches!(r, Err(Error::Infeasible(_))));
}

#[test]
fn scaling_presets_satisfy_the_assumptions() {
    let grid = [1e-2, 1e-3, 1e-4, 1e-5, 1e-6];
    assert!(assumption_report(ScalingPreset::LogExample, 1.5, &grid).unwrap().all_ok());
    assert!(assumption_report(ScalingPreset::PowerExample, 1.5, &grid).unwrap().all_ok());
    assert!((ScalingPreset::power_example_exponent(1.5) - 5.5 / 7.5).abs() < 1e-15);
    assert!(ScalingPreset::Power(0.6).validate(1.5).is_err());
    assert!(ScalingPreset::Power(0.8).validate(1.5).is_ok());
}

#[test]
fn error_functional_vanishes() {
    let f: Vec<f64> = (2..=8)
        .map(|m| f_eps(&ModelParams::new(1.5, 10f64.powi(-m), ScalingPreset::LogExample).unwrap()))
        .collect();
    assert!(f.windows(2).skip(1).all(|w| w[1] < w[0]), "{f:?}");
    assert!(f[6] < 0.1 * f[0]);
}

#[test]
fn interface_profile_is_monotone_and_mirrored() {
    let p = params();
    let s = VoteScheme::new(SchemeKind::Majority, InitialCondition::step());
    let grid = [-0.6, -0.3, 0.3, 0.6];
    let cfg = EstimateConfig::new(20_000, 4);
    let scan = interface_scan(&p, 0.09, &Point::on_axis(1, 1.0), &grid, &MotionSpec::stable(1), &s, &cfg).unwrap();
    assert!(scan.crossing.is_some_and(|c| c.abs() < 0.3));
    for k in 0..2 {
        let (a, b) = (&scan.points[k].1, &scan.points[3 - k].1);
        let se = (a.stderr.powi(2) + b.stderr.powi(2)).sqrt();
        assert!((a.p_hat + b.p_hat - 1.0).abs() <= 3.0 * se);
    }
}

mod stats_props {
    use fracac::stats::*;
    use proptest::prelude::*;

    proptest! {
        #[test]
        fn wilson_interval_contains_the_estimate(n in 1u64..100_000, frac in 0.0f64..=1.0) {
            let k = (frac * n as f64).round() as u64;
            let (lo, hi) = wilson_interval(k, n, 1.96);
            let p = k as f64 / n as f64;
            prop_assert!(0.0 <= lo && lo <= p + 1e-12 && p <= hi + 1e-12 && hi <= 1.0);
        }

        #[test]
        fn isotonic_fit_is_monotone(y in prop::collection::vec(-1.0f64..1.0, 1..40)) {
            let w = vec![1.0; y.len()];
            let fit = isotonic_increasing(&y, &w);
            prop_assert!(fit.windows(2).all(|p| p[0] <= p[1] + 1e-15));
            let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
            prop_assert!((mean(&fit) - mean(&y)).abs() < 1e-12);
        }
    }
}
