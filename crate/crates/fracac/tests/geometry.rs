use fracac::estimator::EstimateConfig;
use fracac::geometry::*;
use fracac::*;
use proptest::prelude::*;

fn params() -> ModelParams {
    ModelParams::new(1.5, 0.2, ScalingPreset::LogExample).unwrap()
}

proptest! {
    #[test]
    fn sphere_flow_is_exact(r0 in 0.1f64..3.0, dim in 2usize..4, frac in 0.0f64..0.99) {
        let f = SphereFlow::new(r0, dim).unwrap();
        let t = frac * f.extinction_time();
        let r = f.radius(t).unwrap();
        prop_assert!((r * r + 2.0 * (dim - 1) as f64 * t - r0 * r0).abs() < 1e-14 * r0.max(1.0).powi(2));
    }

    #[test]
    fn radial_steps_change_distance_by_their_length(angle in 0.0f64..6.28, rad in 0.05f64..2.0, h in -0.04f64..0.5) {
        let f = SphereFlow::new(1.0, 2).unwrap();
        let n = Point::from_slice(&[angle.cos(), angle.sin()]);
        let x = n * rad;
        let d0 = signed_distance(&x, 0.1, &f).unwrap();
        let d1 = signed_distance(&(x + n * h), 0.1, &f).unwrap();
        prop_assert!((d1 - d0 - h).abs() < 1e-12);
    }

    #[test]
    fn shifts_move_distance_exactly(angle in 0.0f64..6.28, off in -0.2f64..0.2, t in 0.0f64..0.3) {
        let p = params();
        let f = SphereFlow::new(1.0, 2).unwrap();
        let beta = 0.2;
        let x = Point::from_slice(&[angle.cos(), angle.sin()]) * (f.radius(t).unwrap() + off);
        let shift = p.i_val * p.i_val * p.log_eps();
        let d = signed_distance(&x, t, &f).unwrap();
        let up = z_shift(&x, t, &f, &p, 1.0, beta, 1.0).unwrap();
        let down = z_shift(&x, t, &f, &p, 1.0, beta, -1.0).unwrap();
        prop_assert!((signed_distance(&up, t, &f).unwrap() - (d + shift)).abs() < 1e-12);
        prop_assert!((signed_distance(&down, t, &f).unwrap() - (d - shift)).abs() < 1e-12);
        prop_assert!(((up - down).norm() - 2.0 * shift).abs() < 1e-12);
    }
}

#[test]
fn on_sphere_shift_and_dimension_check() {
    let p = params();
    let f = SphereFlow::new(1.0, 2).unwrap();
    let x = Point::from_slice(&[0.0, f.radius(0.1).unwrap()]);
    let z = z_shift(&x, 0.1, &f, &p, 2.0, 0.1, 1.0).unwrap();
    let want = 2.0 * p.i_val * p.i_val * p.log_eps();
    assert!((signed_distance(&z, 0.1, &f).unwrap() - want).abs() < 1e-12);
    assert!(z_shift(&Point::zero(1), 0.1, &f, &p, 1.0, 0.1, 1.0).is_err());
}

#[test]
fn coupling_violations_are_rare() {
    let p = ModelParams::new(1.5, 0.1, ScalingPreset::LogExample).unwrap();
    let flow = SphereFlow::new(1.0, 2).unwrap();
    let t = 0.2;
    let r = flow.radius(t).unwrap();
    let cfg = CouplingConfig {
        x0: Point::from_slice(&[r + 0.05, 0.0]),
        t,
        k: 1,
        s_grid: vec![0.0, 0.01, 0.02, 0.04],
        beta: r / 2.0,
        steps: 32,
        resolution_ratio: 1e-3,
        n: 4000,
        seed: 3,
        workers: 1,
    };
    let rep = coupling_check(&p, &flow, &cfg).unwrap();
    assert!(rep.pass, "{rep:?}");
    // s = 0 is deterministic.
    assert_eq!(rep.rows[0].rate_plus, 0.0);
    assert_eq!(rep.rows[0].rate_minus, 0.0);
    assert!(rep.d0_fitted.is_finite() && rep.d0_fitted >= flow.v0(t).unwrap());
}

#[test]
fn coupling_grid_is_bounded() {
    let p = ModelParams::new(1.5, 0.1, ScalingPreset::LogExample).unwrap();
    let flow = SphereFlow::new(1.0, 2).unwrap();
    let cfg = CouplingConfig {
        x0: Point::from_slice(&[0.9, 0.0]),
        t: 0.1,
        k: 1,
        s_grid: vec![1.0],
        beta: 0.1,
        steps: 8,
        resolution_ratio: 1e-3,
        n: 10,
        seed: 1,
        workers: 1,
    };
    assert!(coupling_check(&p, &flow, &cfg).is_err());
}

fn gap_config(x: Point, l: f64) -> GapConfig {
    GapConfig {
        flow: SphereFlow::new(1.0, 2).unwrap(),
        x,
        t: 0.04,
        l,
        beta: 0.3,
        sign: -1.0,
        resolution_ratio: 1e-2,
        estimate: EstimateConfig::new(2000, 5),
    }
}

#[test]
fn trivial_gaps_vanish() {
    let p = ModelParams::new(1.5, 0.2, ScalingPreset::LogExample).unwrap();
    let zero_shift = gronwall_gap(&p, &gap_config(Point::from_slice(&[0.95, 0.0]), 0.0)).unwrap();
    assert_eq!(zero_shift.gap, 0.0);
    let far = gronwall_gap(&p, &gap_config(Point::from_slice(&[40.0, 0.0]), 1.0)).unwrap();
    assert_eq!(far.gap, 0.0);
}

#[test]
fn level_set_of_an_indicator() {
    let f = fracac::oracle::GridField::radial_step(2.0, 128, 1.0, 1.0, 0.0, 1.0).unwrap();
    let r = level_set_radius(&f, 0.5).unwrap();
    assert!((r - 1.0).abs() <= f.spacing(), "{r}");
}
