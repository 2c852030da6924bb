use fracac::tree::*;
use fracac::voting::*;
use fracac::*;
use proptest::prelude::*;

fn params() -> ModelParams {
    ModelParams::new(1.5, 0.3, ScalingPreset::LogExample).unwrap()
}

fn eager_vote(sampler: &NodeSampler, key: StreamKey, x: Point, scheme: &VoteScheme) -> bool {
    let mut t = generate_topology(sampler, key, 1 << 22).unwrap();
    attach_motion(&mut t, sampler, x).unwrap();
    let marks = sample_marks(&t, scheme.kind, sampler).unwrap();
    sample_root_vote(&t, marks.as_deref(), scheme).unwrap()
}

#[test]
fn lazy_matches_eager_on_paired_seeds() {
    let p = params();
    let h = 0.09;
    let cases = [
        (MotionSpec::stable(1), VoteScheme::new(SchemeKind::Majority, InitialCondition::step())),
        (
            MotionSpec::new(MotionKind::SubordinatedTruncated, 1).with_resolution(1e-2),
            VoteScheme::new(SchemeKind::Marked, InitialCondition::step().with_values(0.8, 0.2)),
        ),
        (
            MotionSpec::new(MotionKind::SubordinatedTruncated, 1).with_resolution(1e-2),
            VoteScheme::new(SchemeKind::ExpMarked, InitialCondition::step()),
        ),
        (
            MotionSpec::new(MotionKind::SubordinatedFull, 1).with_resolution(1e-2),
            VoteScheme::new(SchemeKind::BiasedMinus, InitialCondition::step()),
        ),
    ];
    for (motion, scheme) in cases {
        let s = NodeSampler::new(&p, &motion, h).unwrap();
        for i in 0..1000 {
            let key = StreamKey::replicate(42, i);
            let x = Point::from_slice(&[0.1]);
            let mut v = VoteVisitor { scheme };
            let (lazy, _) = lazy_evaluate(&s, key, x, &mut v, true, 1 << 22).unwrap();
            let (full, _) = lazy_evaluate(&s, key, x, &mut v, false, 1 << 22).unwrap();
            assert_eq!(lazy, full);
            assert_eq!(lazy, eager_vote(&s, key, x, &scheme), "{} {i}", scheme.kind.name());
        }
    }
}

struct Count;

impl TreeVisitor for Count {
    type Value = u64;
    fn preempt(&mut self, _: &NodeView, _: &NodeSampler) -> Result<Option<u64>> {
        Ok(None)
    }
    fn leaf(&mut self, _: &NodeView, _: &Point, _: &NodeSampler) -> u64 {
        1
    }
    fn combine(&mut self, _: &NodeView, c: [u64; 3]) -> u64 {
        c.iter().sum()
    }
}

#[test]
fn memory_stays_proportional_to_depth() {
    let p = params();
    let s = NodeSampler::new(&p, &MotionSpec::stable(1), 0.6).unwrap();
    let mut total = 0;
    let mut i = 0;
    while total < 1_000_000 {
        let (_, st) = lazy_evaluate(&s, StreamKey::replicate(1, i), Point::zero(1), &mut Count, false, 1 << 24).unwrap();
        assert!(st.peak_live <= st.max_depth as u64 + 3);
        total += st.visited;
        i += 1;
    }
}

#[test]
fn mean_leaf_count_grows_exponentially() {
    let p = params();
    let h = 2.0 * p.epsilon * p.epsilon;
    let s = NodeSampler::new(&p, &MotionSpec::stable(1), h).unwrap();
    let xs: Vec<f64> = (0..10_000)
        .map(|i| lazy_evaluate(&s, StreamKey::replicate(3, i), Point::zero(1), &mut Count, false, 1 << 24).unwrap().0 as f64)
        .collect();
    let (m, se) = fracac::stats::mean_se(&xs);
    let target = (2.0 * h / (p.epsilon * p.epsilon)).exp();
    assert!((m - target).abs() <= 3.0 * se, "{m} vs {target}");
}

#[test]
fn regular_subtrees_persist_with_time() {
    let p = params();
    let a = NodeSampler::new(&p, &MotionSpec::stable(1), 0.2).unwrap();
    let b = NodeSampler::new(&p, &MotionSpec::stable(1), 0.3).unwrap();
    let (mut ca, mut cb) = (0, 0);
    for i in 0..2000 {
        let key = StreamKey::replicate(8, i);
        let ta = generate_topology(&a, key, 1 << 22).unwrap().contains_regular(2);
        let tb = generate_topology(&b, key, 1 << 22).unwrap().contains_regular(2);
        assert!(!ta || tb);
        ca += ta as u32;
        cb += tb as u32;
    }
    assert!(cb >= ca);
}

#[test]
fn translation_moves_every_position() {
    let p = params();
    let s = NodeSampler::new(&p, &MotionSpec::stable(2), 0.2).unwrap();
    let key = StreamKey::new(77);
    let mut a = generate_topology(&s, key, 1 << 20).unwrap();
    let mut b = a.clone();
    attach_motion(&mut a, &s, Point::zero(2)).unwrap();
    let shift = Point::from_slice(&[0.3, -1.2]);
    attach_motion(&mut b, &s, shift).unwrap();
    for (u, v) in a.nodes.iter().zip(&b.nodes) {
        let d = v.end - u.end - shift;
        assert!(d.norm() < 1e-12);
    }
}

#[test]
fn full_and_truncated_agree_without_large_jumps() {
    let p = ModelParams::new(1.5, 0.2, ScalingPreset::LogExample).unwrap();
    let full = NodeSampler::new(&p, &MotionSpec::new(MotionKind::SubordinatedFull, 1), 0.1).unwrap();
    let trunc = NodeSampler::new(&p, &MotionSpec::new(MotionKind::SubordinatedTruncated, 1), 0.1).unwrap();
    let (mut same, mut differ) = (0, 0);
    for i in 0..500 {
        let key = StreamKey::replicate(5, i);
        let mut a = generate_topology(&full, key, 1 << 20).unwrap();
        let mut b = a.clone();
        attach_motion(&mut a, &full, Point::zero(1)).unwrap();
        attach_motion(&mut b, &trunc, Point::zero(1)).unwrap();
        let quiet = a.nodes.iter().all(|n| n.tau_cross.unwrap() >= n.death - n.birth);
        if quiet {
            assert!(a.nodes.iter().zip(&b.nodes).all(|(u, v)| u.end == v.end));
            same += 1;
        } else {
            differ += 1;
        }
    }
    assert!(same > 0 && differ > 0);
}

#[test]
fn mark_frequencies() {
    let p = ModelParams::new(1.5, 0.2, ScalingPreset::LogExample).unwrap();
    let s = NodeSampler::new(&p, &MotionSpec::new(MotionKind::SubordinatedTruncated, 1).with_resolution(1e-2), 0.1).unwrap();
    let (mut bern, mut n_bern, mut exp_all, mut n_all, mut exp_leaf, mut n_leaf) = (0, 0, 0, 0, 0, 0);
    for i in 0..3000 {
        let mut t = generate_topology(&s, StreamKey::replicate(6, i), 1 << 20).unwrap();
        attach_motion(&mut t, &s, Point::zero(1)).unwrap();
        let bm = sample_marks(&t, SchemeKind::Marked, &s).unwrap().unwrap();
        let em = sample_marks(&t, SchemeKind::ExpMarked, &s).unwrap().unwrap();
        assert!(!bm[0]);
        for (k, n) in t.nodes.iter().enumerate() {
            if k > 0 {
                bern += bm[k] as u64;
                n_bern += 1;
            }
            // Against the uncapped lifetime every individual is marked w.p. b;
            // its own lifetime does not decide whether it exists.
            exp_all += em[k] as u64;
            n_all += 1;
            if n.is_leaf() {
                // The true event: a large jump before the capped lifetime.
                exp_leaf += (n.tau_cross.unwrap() < n.death - n.birth) as u64;
                n_leaf += 1;
            }
        }
    }
    let b = p.b_eps;
    let within = |k: u64, n: u64| ((k as f64 / n as f64) - b).abs() <= 3.0 * (b * (1.0 - b) / n as f64).sqrt();
    assert!(within(bern, n_bern));
    assert!(within(exp_all, n_all));
    assert!((exp_leaf as f64 / n_leaf as f64) <= b + 3.0 * (b * (1.0 - b) / n_leaf as f64).sqrt());
}

#[test]
fn dump_lists_every_node() {
    let p = params();
    let s = NodeSampler::new(&p, &MotionSpec::stable(1), 0.2).unwrap();
    let mut t = generate_topology(&s, StreamKey::new(3), 1 << 20).unwrap();
    attach_motion(&mut t, &s, Point::zero(1)).unwrap();
    let d = t.dump(None);
    assert_eq!(d.lines().count(), t.nodes.len());
    assert!(d.starts_with("- 0.0"));
    assert!(d.lines().all(|l| l.split_whitespace().count() == 5));
}

proptest! {
    #[test]
    fn children_are_born_when_parents_die(seed in any::<u64>(), h in 0.0f64..0.4) {
        let p = params();
        let s = NodeSampler::new(&p, &MotionSpec::stable(1), h).unwrap();
        let t = generate_topology(&s, StreamKey::new(seed), 1 << 22).unwrap();
        for n in &t.nodes {
            prop_assert!(n.death <= h && n.birth <= n.death);
            match n.children {
                Some(c) => for &k in &c {
                    prop_assert_eq!(t.nodes[k].birth, n.death);
                },
                None => prop_assert_eq!(n.death, h),
            }
        }
    }

    #[test]
    fn short_circuit_never_changes_the_vote(seed in any::<u64>(), x in -0.5f64..0.5) {
        let p = params();
        let s = NodeSampler::new(&p, &MotionSpec::stable(1), 0.1).unwrap();
        let mut v = VoteVisitor { scheme: VoteScheme::new(SchemeKind::Majority, InitialCondition::step()) };
        let x = Point::from_slice(&[x]);
        let a = lazy_evaluate(&s, StreamKey::new(seed), x, &mut v, true, 1 << 22).unwrap();
        let b = lazy_evaluate(&s, StreamKey::new(seed), x, &mut v, false, 1 << 22).unwrap();
        prop_assert_eq!(a.0, b.0);
        prop_assert!(a.1.visited <= b.1.visited);
    }
}
