//! Ternary branching trees with spatial motion: lazy depth-first evaluation
//! and an eager reference representation.
//!
//! Every draw is addressed by the individual's label (see [`crate::rng`]), so
//! the lazy evaluator, the eager tree and any coupled arm see the same
//! lifetimes, motions, marks and votes for the same label.

use crate::error::{Error, Result};
use crate::geometry::{z_shift_by, SphereFlow};
use crate::levy::{sample_stable_increment, TruncatedSubordinator, DEFAULT_RESOLUTION_RATIO};
use crate::params::ModelParams;
use crate::point::Point;
use crate::rng::{Purpose, StreamKey};
use crate::voting::{SchemeKind, VoteScheme};
use rand::Rng;
use rand_distr::{Distribution, Exp1, StandardNormal};
use std::fmt::Write as _;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum MotionKind {
    /// α-stable motion (Brownian with generator Δ when α = 2).
    Stable,
    /// Brownian motion run by the truncated subordinator.
    SubordinatedTruncated,
    /// Truncated subordinator plus the jumps above the truncation level.
    SubordinatedFull,
    /// Truncated motion pushed outward near the moving interface.
    ZPlus,
    /// Truncated motion pushed inward near the moving interface.
    ZMinus,
}

impl MotionKind {
    pub fn name(&self) -> &'static str {
        match self {
            MotionKind::Stable => "stable",
            MotionKind::SubordinatedTruncated => "truncated",
            MotionKind::SubordinatedFull => "full",
            MotionKind::ZPlus => "z-plus",
            MotionKind::ZMinus => "z-minus",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        Ok(match s.trim() {
            "stable" => MotionKind::Stable,
            "truncated" => MotionKind::SubordinatedTruncated,
            "full" => MotionKind::SubordinatedFull,
            "z-plus" => MotionKind::ZPlus,
            "z-minus" => MotionKind::ZMinus,
            other => return Err(Error::Domain(format!("unknown motion '{other}'"))),
        })
    }

    pub fn is_subordinated(&self) -> bool {
        !matches!(self, MotionKind::Stable)
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MotionSpec {
    pub kind: MotionKind,
    pub dim: usize,
    /// Required by the Z± motions.
    pub flow: Option<SphereFlow>,
    /// Shift size in units of I²|log ε|.
    pub shift_l: f64,
    /// Half-width of the band around the interface where Z± shifts.
    pub band: f64,
    /// Smallest simulated subordinator jump, as a fraction of the truncation level.
    pub resolution_ratio: f64,
}

impl MotionSpec {
    pub fn new(kind: MotionKind, dim: usize) -> Self {
        MotionSpec {
            kind,
            dim,
            flow: None,
            shift_l: 1.0,
            band: 0.1,
            resolution_ratio: DEFAULT_RESOLUTION_RATIO,
        }
    }

    pub fn stable(dim: usize) -> Self {
        MotionSpec::new(MotionKind::Stable, dim)
    }

    pub fn with_flow(mut self, flow: SphereFlow, shift_l: f64, band: f64) -> Self {
        self.flow = Some(flow);
        self.shift_l = shift_l;
        self.band = band;
        self
    }

    pub fn with_resolution(mut self, ratio: f64) -> Self {
        self.resolution_ratio = ratio;
        self
    }

    pub fn with_kind(mut self, kind: MotionKind) -> Self {
        self.kind = kind;
        self
    }

    pub fn validate(&self, params: &ModelParams) -> Result<()> {
        if !(1..=crate::point::MAX_DIM).contains(&self.dim) {
            return Err(Error::Domain(format!("dimension {} unsupported", self.dim)));
        }
        if self.kind.is_subordinated() && params.is_brownian() {
            return Err(Error::Domain("subordinated motions need alpha < 2".into()));
        }
        if !(self.resolution_ratio > 0.0 && self.resolution_ratio < 1.0) {
            return Err(Error::Domain("resolution ratio must lie in (0, 1)".into()));
        }
        if matches!(self.kind, MotionKind::ZPlus | MotionKind::ZMinus) {
            if self.flow.is_none() {
                return Err(Error::Domain("Z motions need a reference flow".into()));
            }
            if self.dim < 2 {
                return Err(Error::Domain("Z motions need dim >= 2".into()));
            }
            if !(self.band > 0.0 && self.shift_l >= 0.0) {
                return Err(Error::Domain("Z motions need band > 0 and l >= 0".into()));
            }
        }
        Ok(())
    }

    /// Whether two motions can be driven by the same randomness.
    pub fn couplable(&self, other: &MotionSpec) -> Result<()> {
        if self.dim != other.dim {
            return Err(Error::Uncouplable(format!("dimensions {} and {}", self.dim, other.dim)));
        }
        let (a, b) = (self.kind.is_subordinated(), other.kind.is_subordinated());
        if a != b {
            return Err(Error::Uncouplable(format!(
                "{} and {} are driven by different noises",
                self.kind.name(),
                other.kind.name()
            )));
        }
        if a && self.resolution_ratio != other.resolution_ratio {
            return Err(Error::Uncouplable("subordinators with different resolutions".into()));
        }
        Ok(())
    }
}

/// Per-label draws for one model, motion and horizon.
#[derive(Clone, Debug)]
pub struct NodeSampler {
    pub params: ModelParams,
    pub motion: MotionSpec,
    pub horizon: f64,
    law: Option<TruncatedSubordinator>,
    shift: f64,
}

impl NodeSampler {
    pub fn new(params: &ModelParams, motion: &MotionSpec, horizon: f64) -> Result<Self> {
        if !(horizon >= 0.0 && horizon.is_finite()) {
            return Err(Error::Domain(format!("horizon must be finite and >= 0, got {horizon}")));
        }
        motion.validate(params)?;
        if let Some(flow) = &motion.flow {
            if matches!(motion.kind, MotionKind::ZPlus | MotionKind::ZMinus) && horizon >= flow.extinction_time() {
                return Err(Error::FlowExtinct { t: horizon, extinction: flow.extinction_time() });
            }
        }
        let law = if motion.kind.is_subordinated() {
            Some(TruncatedSubordinator::with_ratio(params, motion.resolution_ratio)?)
        } else {
            None
        };
        let shift = motion.shift_l * params.i_val * params.i_val * params.log_eps();
        Ok(NodeSampler { params: params.clone(), motion: *motion, horizon, law, shift })
    }

    pub fn subordinator(&self) -> Option<&TruncatedSubordinator> {
        self.law.as_ref()
    }

    pub fn lifetime(&self, key: StreamKey) -> f64 {
        let e: f64 = Exp1.sample(&mut key.rng(Purpose::Lifetime));
        e / self.params.branch_rate
    }

    /// (death time, is leaf) for an individual born at `birth`.
    /// (lifetime, death time, is leaf) for an individual born at `birth`;
    /// the death time is capped at the horizon, the lifetime is not.
    pub fn death(&self, key: StreamKey, birth: f64) -> (f64, f64, bool) {
        let tau = self.lifetime(key);
        let d = birth + tau;
        if d >= self.horizon {
            (tau, self.horizon, true)
        } else {
            (tau, d, false)
        }
    }

    /// Time of the first subordinator jump above the truncation level.
    pub fn tau_cross(&self, key: StreamKey) -> Result<f64> {
        let law = self.law.as_ref().ok_or(Error::MissingJumpRecords)?;
        let e: f64 = Exp1.sample(&mut key.rng(Purpose::LargeJumps));
        Ok(e / law.large_rate)
    }

    pub fn bernoulli_mark(&self, key: StreamKey) -> bool {
        key.rng(Purpose::Mark).random::<f64>() < self.params.b_eps
    }

    pub fn vote_uniform(&self, key: StreamKey) -> f64 {
        key.rng(Purpose::Vote).random()
    }

    /// Raw (unshifted) displacement over a lifetime of length `dt`.
    pub fn displacement(&self, key: StreamKey, dt: f64) -> Point {
        let dim = self.motion.dim;
        let law = match (&self.law, self.motion.kind) {
            (None, _) | (_, MotionKind::Stable) => {
                return sample_stable_increment(&self.params, dt, dim, &mut key.rng(Purpose::Stable));
            }
            (Some(law), _) => law,
        };
        let mut r = law.sample_increment(dt, &mut key.rng(Purpose::SmallJumps));
        if self.motion.kind == MotionKind::SubordinatedFull {
            r += law.sample_large_increment(dt, &mut key.rng(Purpose::LargeJumps)).0;
        }
        let mut normals = key.rng(Purpose::Gaussian);
        let scale = (2.0 * r).sqrt();
        let mut p = Point::zero(dim);
        for c in p.as_mut_slice() {
            let z: f64 = StandardNormal.sample(&mut normals);
            *c = scale * z;
        }
        p
    }

    /// Position at death of an individual living on [birth, death] from `start`.
    pub fn end_position(&self, key: StreamKey, start: Point, birth: f64, death: f64) -> Result<Point> {
        let end = start + self.displacement(key, death - birth);
        match self.motion.kind {
            MotionKind::ZPlus | MotionKind::ZMinus => {
                let flow = self.motion.flow.as_ref().ok_or(Error::MissingJumpRecords)?;
                let sign = if self.motion.kind == MotionKind::ZPlus { 1.0 } else { -1.0 };
                z_shift_by(&end, self.horizon - death, flow, sign * self.shift, self.motion.band)
            }
            _ => Ok(end),
        }
    }
}

/// What the lazy evaluator shows a visitor about the current individual.
#[derive(Clone, Copy, Debug)]
pub struct NodeView {
    pub key: StreamKey,
    pub depth: u32,
    pub birth: f64,
    pub death: f64,
    /// Exponential lifetime, not capped at the horizon.
    pub lifetime: f64,
    pub is_leaf: bool,
    pub start: Point,
}

impl NodeView {
    pub fn is_root(&self) -> bool {
        self.depth == 0
    }
}

/// Bottom-up computation on a lazily generated tree.
pub trait TreeVisitor {
    type Value: Copy;

    /// A value decided before the motion is simulated (e.g. a marked voter);
    /// the motion and the whole subtree are then skipped.
    fn preempt(&mut self, node: &NodeView, sampler: &NodeSampler) -> Result<Option<Self::Value>>;

    fn leaf(&mut self, node: &NodeView, end: &Point, sampler: &NodeSampler) -> Self::Value;

    /// A value already determined by the first two children, if any.
    fn shortcut(&self, _a: Self::Value, _b: Self::Value) -> Option<Self::Value> {
        None
    }

    fn combine(&mut self, node: &NodeView, children: [Self::Value; 3]) -> Self::Value;
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct LazyStats {
    /// Individuals whose lifetime was drawn.
    pub visited: u64,
    /// Most individuals simultaneously on the DFS stack.
    pub peak_live: u64,
    pub max_depth: u32,
}

struct Walk<'a, V> {
    sampler: &'a NodeSampler,
    visitor: &'a mut V,
    short_circuit: bool,
    budget: u64,
    live: u64,
    stats: LazyStats,
}

impl<V: TreeVisitor> Walk<'_, V> {
    fn visit(&mut self, key: StreamKey, depth: u32, birth: f64, start: Point) -> Result<V::Value> {
        self.stats.visited += 1;
        if self.stats.visited > self.budget {
            return Err(Error::BudgetExceeded(self.budget));
        }
        self.live += 1;
        self.stats.peak_live = self.stats.peak_live.max(self.live);
        self.stats.max_depth = self.stats.max_depth.max(depth);
        let out = self.visit_inner(key, depth, birth, start);
        self.live -= 1;
        out
    }

    fn visit_inner(&mut self, key: StreamKey, depth: u32, birth: f64, start: Point) -> Result<V::Value> {
        let (lifetime, death, is_leaf) = self.sampler.death(key, birth);
        let view = NodeView { key, depth, birth, death, lifetime, is_leaf, start };
        if let Some(v) = self.visitor.preempt(&view, self.sampler)? {
            return Ok(v);
        }
        let end = self.sampler.end_position(key, start, birth, death)?;
        if is_leaf {
            return Ok(self.visitor.leaf(&view, &end, self.sampler));
        }
        let a = self.visit(key.child(1), depth + 1, death, end)?;
        let b = self.visit(key.child(2), depth + 1, death, end)?;
        if self.short_circuit {
            if let Some(v) = self.visitor.shortcut(a, b) {
                return Ok(v);
            }
        }
        let c = self.visit(key.child(3), depth + 1, death, end)?;
        Ok(self.visitor.combine(&view, [a, b, c]))
    }
}

/// Depth-first evaluation without materialising the tree; memory is
/// proportional to the depth.
pub fn lazy_evaluate<V: TreeVisitor>(
    sampler: &NodeSampler,
    root: StreamKey,
    start: Point,
    visitor: &mut V,
    short_circuit: bool,
    budget: u64,
) -> Result<(V::Value, LazyStats)> {
    if start.dim() != sampler.motion.dim {
        return Err(Error::Domain(format!(
            "start point has dim {}, motion has dim {}",
            start.dim(),
            sampler.motion.dim
        )));
    }
    let mut walk = Walk { sampler, visitor, short_circuit, budget, live: 0, stats: LazyStats::default() };
    let v = walk.visit(root, 0, 0.0, start)?;
    Ok((v, walk.stats))
}

/// Whether an individual is marked, for the schemes that mark.
pub fn is_marked(kind: SchemeKind, node: &NodeView, sampler: &NodeSampler) -> Result<bool> {
    if kind.bernoulli_marks() {
        Ok(!node.is_root() && sampler.bernoulli_mark(node.key))
    } else if kind == SchemeKind::ExpMarked {
        // Marked iff the first large jump precedes the (uncapped) lifetime.
        Ok(sampler.tau_cross(node.key)? < node.lifetime)
    } else {
        Ok(false)
    }
}

/// One Bernoulli realisation of the root vote.
#[derive(Clone, Copy, Debug)]
pub struct VoteVisitor {
    pub scheme: VoteScheme,
}

impl TreeVisitor for VoteVisitor {
    type Value = bool;

    fn preempt(&mut self, node: &NodeView, sampler: &NodeSampler) -> Result<Option<bool>> {
        if is_marked(self.scheme.kind, node, sampler)? {
            let m = self.scheme.kind.marked_vote().unwrap_or(0.5);
            return Ok(Some(sampler.vote_uniform(node.key) < m));
        }
        Ok(None)
    }

    fn leaf(&mut self, node: &NodeView, end: &Point, sampler: &NodeSampler) -> bool {
        sampler.vote_uniform(node.key) < self.scheme.initial.eval(end)
    }

    fn shortcut(&self, a: bool, b: bool) -> Option<bool> {
        (a == b).then_some(a)
    }

    fn combine(&mut self, _node: &NodeView, c: [bool; 3]) -> bool {
        (c[0] as u8 + c[1] as u8 + c[2] as u8) >= 2
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TreeNode {
    /// Ulam-Harris label; empty for the root.
    pub label: Vec<u8>,
    pub key: StreamKey,
    pub parent: Option<usize>,
    pub birth: f64,
    pub death: f64,
    /// Exponential lifetime, not capped at the horizon.
    pub lifetime: f64,
    pub children: Option<[usize; 3]>,
    pub start: Point,
    pub end: Point,
    /// First subordinator jump above the truncation level, when recorded.
    pub tau_cross: Option<f64>,
}

impl TreeNode {
    pub fn is_leaf(&self) -> bool {
        self.children.is_none()
    }

    pub fn depth(&self) -> usize {
        self.label.len()
    }
}

/// A fully materialised tree; nodes are in depth-first preorder, root first.
#[derive(Clone, Debug, PartialEq)]
pub struct BranchingTree {
    pub nodes: Vec<TreeNode>,
    pub horizon: f64,
    pub root_key: StreamKey,
}

impl BranchingTree {
    pub fn leaves(&self) -> impl Iterator<Item = &TreeNode> {
        self.nodes.iter().filter(|n| n.is_leaf())
    }

    pub fn leaf_count(&self) -> usize {
        self.leaves().count()
    }

    /// Whether every individual of generation < n has branched.
    pub fn contains_regular(&self, n: usize) -> bool {
        self.nodes.iter().all(|node| node.depth() >= n || !node.is_leaf())
    }

    /// `label birth death mark x...` per individual, preorder; the root label is `-`.
    pub fn dump(&self, marks: Option<&[bool]>) -> String {
        let mut out = String::new();
        for (i, n) in self.nodes.iter().enumerate() {
            let label = if n.label.is_empty() {
                "-".to_string()
            } else {
                n.label.iter().map(|c| char::from(b'0' + c)).collect()
            };
            let mark = marks.map_or(0, |m| m[i] as u8);
            let _ = write!(out, "{label} {:.17e} {:.17e} {mark}", n.birth, n.death);
            for c in n.end.as_slice() {
                let _ = write!(out, " {c:.17e}");
            }
            out.push('\n');
        }
        out
    }
}

/// Branching times only (positions are left at the origin). The horizon and
/// budget come from the sampler; exceeding the budget is an error.
pub fn generate_topology(sampler: &NodeSampler, root: StreamKey, budget: u64) -> Result<BranchingTree> {
    let dim = sampler.motion.dim;
    let mut nodes: Vec<TreeNode> = Vec::new();
    // (key, label, parent, birth)
    let mut stack = vec![(root, Vec::new(), None::<usize>, 0.0)];
    while let Some((key, label, parent, birth)) = stack.pop() {
        if nodes.len() as u64 >= budget {
            return Err(Error::BudgetExceeded(budget));
        }
        let (lifetime, death, is_leaf) = sampler.death(key, birth);
        let idx = nodes.len();
        if let Some(p) = parent {
            let slot = (*label.last().unwrap() - 1) as usize;
            nodes[p].children.get_or_insert([0; 3])[slot] = idx;
        }
        if !is_leaf {
            for c in (1..=3u8).rev() {
                let mut l = label.clone();
                l.push(c);
                stack.push((key.child(c), l, Some(idx), death));
            }
        }
        nodes.push(TreeNode {
            label,
            key,
            parent,
            birth,
            death,
            lifetime,
            children: None,
            start: Point::zero(dim),
            end: Point::zero(dim),
            tau_cross: None,
        });
    }
    Ok(BranchingTree { nodes, horizon: sampler.horizon, root_key: root })
}

/// Fill in start/end positions (and jump records for subordinated motions).
pub fn attach_motion(tree: &mut BranchingTree, sampler: &NodeSampler, start: Point) -> Result<()> {
    if start.dim() != sampler.motion.dim {
        return Err(Error::Domain("start point dimension does not match the motion".into()));
    }
    for i in 0..tree.nodes.len() {
        let s = match tree.nodes[i].parent {
            None => start,
            Some(p) => tree.nodes[p].end,
        };
        let n = &tree.nodes[i];
        let end = sampler.end_position(n.key, s, n.birth, n.death)?;
        let tau = if sampler.motion.kind.is_subordinated() { Some(sampler.tau_cross(n.key)?) } else { None };
        let n = &mut tree.nodes[i];
        n.start = s;
        n.end = end;
        n.tau_cross = tau;
    }
    Ok(())
}

/// Marks per node (None for majority voting).
pub fn sample_marks(tree: &BranchingTree, kind: SchemeKind, sampler: &NodeSampler) -> Result<Option<Vec<bool>>> {
    match kind {
        SchemeKind::Majority => Ok(None),
        SchemeKind::ExpMarked => tree
            .nodes
            .iter()
            .map(|n| n.tau_cross.map(|t| t < n.lifetime).ok_or(Error::MissingJumpRecords))
            .collect::<Result<Vec<_>>>()
            .map(Some),
        _ => Ok(Some(
            tree.nodes
                .iter()
                .map(|n| n.parent.is_some() && sampler.bernoulli_mark(n.key))
                .collect(),
        )),
    }
}

/// Marked individuals together with their (skipped) descendants.
pub fn hidden_by_marks(tree: &BranchingTree, marks: &[bool]) -> Vec<bool> {
    let mut hidden = vec![false; tree.nodes.len()];
    for i in 0..tree.nodes.len() {
        hidden[i] = marks[i] || tree.nodes[i].parent.is_some_and(|p| hidden[p]);
    }
    hidden
}
