use fracac::tree::*;
use fracac::voting::*;
use fracac::*;
use proptest::prelude::*;

fn tree_1d(seed: u64, horizon: f64, x: f64) -> BranchingTree {
    let p = ModelParams::new(1.5, 0.3, ScalingPreset::LogExample).unwrap();
    let s = NodeSampler::new(&p, &MotionSpec::stable(1), horizon).unwrap();
    let mut t = generate_topology(&s, StreamKey::new(seed), 1 << 16).unwrap();
    attach_motion(&mut t, &s, Point::from_slice(&[x])).unwrap();
    t
}

fn mirrored(t: &BranchingTree) -> BranchingTree {
    let mut m = t.clone();
    for n in &mut m.nodes {
        n.start = n.start * -1.0;
        n.end = n.end * -1.0;
    }
    m
}

proptest! {
    #[test]
    fn g_times_is_symmetric(q in 0.0f64..1.0, b in 0.0f64..0.33) {
        prop_assert!((g_times_diag(q, b) - (1.0 - g_times_diag(1.0 - q, b))).abs() < 1e-12);
    }

    #[test]
    fn g_times_is_monotone(p in prop::array::uniform3(0.0f64..1.0), d in 0.0f64..0.5, i in 0usize..3, b in 0.0f64..0.33) {
        let mut q = p;
        q[i] = (q[i] + d).min(1.0);
        prop_assert!(g_times(q[0], q[1], q[2], b) >= g_times(p[0], p[1], p[2], b) - 1e-15);
    }

    #[test]
    fn g_times_reduces_to_g(p in prop::array::uniform3(0.0f64..1.0)) {
        prop_assert!((g_times(p[0], p[1], p[2], 0.0) - g(p[0], p[1], p[2])).abs() < 1e-15);
    }

    #[test]
    fn cubic_identity(p in 0.0f64..1.0, b in 0.0f64..0.333) {
        prop_assert!(cubic_identity_residual(p, b).unwrap().abs() < 1e-12);
    }

    #[test]
    fn fixed_points_are_fixed(b in 0.0f64..0.333) {
        let (lo, half, hi) = fixed_points(b).unwrap();
        prop_assert!(lo < half && half < hi);
        prop_assert!((lo + hi - 1.0).abs() < 1e-15);
        prop_assert!((g_times_diag(hi, b) - hi).abs() < 1e-12);
        prop_assert!((g_times_diag(lo, b) - lo).abs() < 1e-12);
    }

    #[test]
    fn easy_bound(p in prop::array::uniform3(0.5f64..1.0), b in 0.0f64..0.333) {
        let (lo, _, hi) = fixed_points(b).unwrap();
        let m = p.iter().copied().fold(hi, f64::min);
        prop_assert!(g_times(p[0], p[1], p[2], b) >= m - 1e-15);
        let q = p.map(|x| 1.0 - x);
        let m = q.iter().copied().fold(lo, f64::max);
        prop_assert!(g_times(q[0], q[1], q[2], b) <= m + 1e-15);
    }

    #[test]
    fn dp_mirror(seed in any::<u64>(), x in -1.0f64..1.0) {
        let p = ModelParams::new(1.5, 0.1, ScalingPreset::LogExample).unwrap();
        let t = tree_1d(seed, 0.15, x);
        let scheme = VoteScheme::new(SchemeKind::Marked, InitialCondition::hat(&p).unwrap());
        let a = dp_root_probability(&t, &scheme, p.b_eps).unwrap();
        let m = dp_root_probability(&mirrored(&t), &scheme, p.b_eps).unwrap();
        prop_assert!((a + m - 1.0).abs() < 1e-12);
    }

    #[test]
    fn dp_monotone_in_shift(seed in any::<u64>(), shift in 0.0f64..0.5) {
        let t = tree_1d(seed, 0.15, 0.0);
        let mut s = t.clone();
        for n in &mut s.nodes {
            n.end = n.end + Point::from_slice(&[shift]);
        }
        for kind in [SchemeKind::Majority, SchemeKind::Marked, SchemeKind::BiasedPlus, SchemeKind::BiasedMinus] {
            let sch = VoteScheme::new(kind, InitialCondition::step());
            prop_assert!(dp_root_probability(&s, &sch, 0.1).unwrap() >= dp_root_probability(&t, &sch, 0.1).unwrap());
        }
    }

    #[test]
    fn dp_child_permutation_invariant(seed in any::<u64>()) {
        let t = tree_1d(seed, 0.2, 0.05);
        let mut r = t.clone();
        for n in &mut r.nodes {
            if let Some(c) = n.children.as_mut() {
                c.rotate_left(1);
            }
        }
        let sch = VoteScheme::new(SchemeKind::Marked, InitialCondition::step());
        let a = dp_root_probability(&t, &sch, 0.2).unwrap();
        let b = dp_root_probability(&r, &sch, 0.2).unwrap();
        prop_assert!((a - b).abs() < 1e-15);
    }
}

#[test]
fn regular_depth_two_tree_is_the_iterate() {
    let p = ModelParams::new(1.5, 0.3, ScalingPreset::LogExample).unwrap();
    let s = NodeSampler::new(&p, &MotionSpec::stable(1), 0.5).unwrap();
    let q = 0.73;
    let b = 0.12;
    // Find a tree that has branched twice everywhere, then cut it at depth 2.
    let mut seed = 0;
    let t = loop {
        let t = generate_topology(&s, StreamKey::new(seed), 1 << 20);
        if let Ok(t) = t {
            if t.contains_regular(2) {
                break t;
            }
        }
        seed += 1;
    };
    let mut cut = BranchingTree { nodes: Vec::new(), horizon: t.horizon, root_key: t.root_key };
    let mut map = vec![usize::MAX; t.nodes.len()];
    for (i, n) in t.nodes.iter().enumerate() {
        if n.depth() > 2 {
            continue;
        }
        map[i] = cut.nodes.len();
        let mut m = n.clone();
        m.parent = n.parent.map(|p| map[p]);
        if n.depth() == 2 {
            m.children = None;
            m.end = Point::from_slice(&[1.0]);
        }
        cut.nodes.push(m);
    }
    for i in 0..cut.nodes.len() {
        if let Some(c) = cut.nodes[i].children {
            cut.nodes[i].children = Some(c.map(|j| map[j]));
        }
    }
    let scheme = VoteScheme::new(SchemeKind::Marked, InitialCondition::constant(q));
    let dp = dp_root_probability(&cut, &scheme, b).unwrap();
    let it = iterate_g_times(q, 2, b, 0.0).unwrap();
    assert!((dp - it.value).abs() < 1e-15);
}

#[test]
fn iterates_from_above_contract_to_u_plus() {
    let it = iterate_g_times(1.0, 30, 0.1, 1e-12).unwrap();
    let (_, _, hi) = fixed_points(0.1).unwrap();
    assert!(it.trajectory.windows(2).all(|w| w[1] <= w[0] + 1e-15));
    assert!((it.value - hi).abs() < 1e-12);
    assert!(iterate_g_times(0.5, 10, 0.1, 0.0).unwrap().trajectory.iter().all(|&q| q == 0.5));
}

#[test]
fn small_b_expansion_of_u_minus() {
    let r: Vec<f64> = [1e-2, 1e-3]
        .iter()
        .map(|&b| {
            let (lo, _, _) = fixed_points(b).unwrap();
            (lo - 0.75 * b * b) / (b * b * b)
        })
        .collect();
    // Residual over b³ is bounded and roughly constant.
    assert!(r.iter().all(|x| x.abs() < 10.0));
    assert!((r[0] - r[1]).abs() < 0.1 * r[1].abs().max(1.0));
}

#[test]
fn sampled_votes_match_dp() {
    let p = ModelParams::new(1.5, 0.1, ScalingPreset::LogExample).unwrap();
    let s = NodeSampler::new(&p, &MotionSpec::stable(1), 0.02).unwrap();
    let mut seed = 17;
    let t = loop {
        let mut t = generate_topology(&s, StreamKey::new(seed), 1 << 16).unwrap();
        if t.nodes.len() >= 7 {
            attach_motion(&mut t, &s, Point::from_slice(&[0.01])).unwrap();
            break t;
        }
        seed += 1;
    };
    let scheme = VoteScheme::new(SchemeKind::Marked, InitialCondition::hat(&p).unwrap());
    let exact = dp_root_probability(&t, &scheme, p.b_eps).unwrap();
    let n = 100_000;
    let mut ones = 0;
    for i in 0..n {
        // Fresh votes and marks on the same tree and positions.
        let mut r = t.clone();
        for node in &mut r.nodes {
            node.key = node.key.derive(i);
        }
        let marks = sample_marks(&r, SchemeKind::Marked, &s).unwrap();
        ones += sample_root_vote(&r, marks.as_deref(), &scheme).unwrap() as u64;
    }
    let ph = ones as f64 / n as f64;
    let se = (exact * (1.0 - exact) / n as f64).sqrt();
    assert!((ph - exact).abs() <= 3.0 * se + 1e-12, "{ph} vs {exact}");
}

#[test]
fn biased_minus_can_flip_certain_votes() {
    let p = ModelParams::new(1.5, 0.3, ScalingPreset::LogExample).unwrap();
    let s = NodeSampler::new(&p, &MotionSpec::stable(1), 0.2).unwrap();
    let mut t = tree_1d(5, 0.2, 0.0);
    while t.nodes.len() < 4 {
        t = tree_1d(t.root_key.0 ^ 7, 0.2, 0.0);
    }
    let scheme = VoteScheme::new(SchemeKind::BiasedMinus, InitialCondition::constant(1.0));
    let majority = VoteScheme::new(SchemeKind::Majority, InitialCondition::constant(1.0));
    assert!(sample_root_vote(&t, None, &majority).unwrap());
    let mut zeros = 0;
    for i in 0..5000 {
        let mut r = t.clone();
        for node in &mut r.nodes {
            node.key = node.key.derive(i);
        }
        let marks = sample_marks(&r, SchemeKind::BiasedMinus, &s).unwrap();
        zeros += !sample_root_vote(&r, marks.as_deref(), &scheme).unwrap() as u32;
    }
    assert!(zeros > 0);
}

#[test]
fn exp_marked_is_rejected_by_dp() {
    let t = tree_1d(1, 0.1, 0.0);
    let scheme = VoteScheme::new(SchemeKind::ExpMarked, InitialCondition::step());
    assert!(dp_root_probability(&t, &scheme, 0.1).is_err());
    assert!(sample_root_vote(&t, None, &scheme).is_err());
}
