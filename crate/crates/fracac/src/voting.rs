//! Majority-vote algebra, the marked variants, and exact/sampled root votes
//! on realised trees.

use crate::error::{domain, Error, Result};
use crate::params::ModelParams;
use crate::point::Point;
use crate::rng::Purpose;
use crate::tree::BranchingTree;
use rand::Rng;

/// Probability that the majority of three independent votes is 1.
pub fn g(p1: f64, p2: f64, p3: f64) -> f64 {
    p1 * p2 * p3 + p1 * p2 * (1.0 - p3) + p2 * p3 * (1.0 - p1) + p3 * p1 * (1.0 - p2)
}

/// g on the diagonal: 3q² - 2q³.
pub fn g_diag(q: f64) -> f64 {
    q * q * (3.0 - 2.0 * q)
}

#[inline]
fn clamp01(p: f64) -> f64 {
    p.clamp(0.0, 1.0)
}

/// Unmarked-parent vote when each child is marked w.p. b and then votes 1 w.p. `m`.
#[inline]
fn g_marked(p: [f64; 3], b: f64, m: f64) -> f64 {
    let t = |x: f64| (1.0 - b) * clamp01(x) + b * m;
    g(t(p[0]), t(p[1]), t(p[2]))
}

/// g×: marked children vote fairly.
pub fn g_times(p1: f64, p2: f64, p3: f64, b: f64) -> f64 {
    g_marked([p1, p2, p3], b, 0.5)
}

/// g₊: marked children vote 1.
pub fn g_plus(p1: f64, p2: f64, p3: f64, b: f64) -> f64 {
    g_marked([p1, p2, p3], b, 1.0)
}

/// g₋: marked children vote 0.
pub fn g_minus(p1: f64, p2: f64, p3: f64, b: f64) -> f64 {
    g_marked([p1, p2, p3], b, 0.0)
}

pub fn g_times_diag(q: f64, b: f64) -> f64 {
    g_diag((1.0 - b) * clamp01(q) + b / 2.0)
}

/// (u₋, 1/2, u₊): the fixed points of g× on the diagonal.
pub fn fixed_points(b: f64) -> Result<(f64, f64, f64)> {
    if !(0.0..1.0 / 3.0).contains(&b) {
        return domain(format!("fixed points need 0 <= b < 1/3, got {b}"));
    }
    let c = (1.0 - b).powi(3);
    let half_width = (c * (1.0 - 3.0 * b)).sqrt() / (2.0 * c);
    Ok((0.5 - half_width, 0.5, 0.5 + half_width))
}

/// Result of iterating g× from q0.
#[derive(Clone, Debug, PartialEq)]
pub struct Iteration {
    pub value: f64,
    /// First n with |g×^{(n)}(q0) - u₊| <= tol, if reached within the budget.
    pub hit: Option<usize>,
    pub trajectory: Vec<f64>,
}

/// n-fold composition of g× starting at q0, tracking the first index within
/// `tol` of u₊.
pub fn iterate_g_times(q0: f64, n: usize, b: f64, tol: f64) -> Result<Iteration> {
    let (_, _, u_plus) = fixed_points(b)?;
    let mut q = q0;
    let mut trajectory = Vec::with_capacity(n + 1);
    trajectory.push(q);
    let mut hit = ((q - u_plus).abs() <= tol).then_some(0);
    for i in 1..=n {
        q = g_times_diag(q, b);
        trajectory.push(q);
        if hit.is_none() && (q - u_plus).abs() <= tol {
            hit = Some(i);
        }
    }
    Ok(Iteration { value: q, hit, trajectory })
}

/// g×(p) - p - 2(1-b)³(p-u₋)(p-1/2)(u₊-p); zero up to rounding.
pub fn cubic_identity_residual(p: f64, b: f64) -> Result<f64> {
    let (lo, _, hi) = fixed_points(b)?;
    Ok(g_times_diag(p, b) - p - 2.0 * (1.0 - b).powi(3) * (p - lo) * (p - 0.5) * (hi - p))
}

/// Where the leaf vote probability takes its high value.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Region {
    /// First coordinate ≥ 0.
    HalfLine,
    /// |x| ≥ r0 (outside a ball).
    OutsideBall(f64),
}

/// Leaf vote probability p(x) = hi on the region, lo off it.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct InitialCondition {
    pub region: Region,
    pub hi: f64,
    pub lo: f64,
}

impl InitialCondition {
    /// p₀ = 1_{x ≥ 0}.
    pub fn step() -> Self {
        InitialCondition { region: Region::HalfLine, hi: 1.0, lo: 0.0 }
    }

    /// p̂₀ = u₊ 1_{x ≥ 0} + u₋ 1_{x < 0}.
    pub fn hat(params: &ModelParams) -> Result<Self> {
        let (lo, hi) = params.u_pm()?;
        Ok(InitialCondition { region: Region::HalfLine, hi, lo })
    }

    pub fn constant(c: f64) -> Self {
        InitialCondition { region: Region::HalfLine, hi: c, lo: c }
    }

    /// 1 outside the ball of radius r0, 0 inside.
    pub fn ball(r0: f64) -> Self {
        InitialCondition { region: Region::OutsideBall(r0), hi: 1.0, lo: 0.0 }
    }

    pub fn with_values(self, hi: f64, lo: f64) -> Self {
        InitialCondition { hi, lo, ..self }
    }

    #[inline]
    pub fn eval(&self, x: &Point) -> f64 {
        let inside = match self.region {
            Region::HalfLine => x.x() >= 0.0,
            Region::OutsideBall(r0) => x.norm() >= r0,
        };
        if inside {
            self.hi
        } else {
            self.lo
        }
    }

    pub fn validate(&self) -> Result<()> {
        if (0.0..=1.0).contains(&self.hi) && (0.0..=1.0).contains(&self.lo) {
            Ok(())
        } else {
            domain("initial condition must map into [0, 1]")
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum SchemeKind {
    Majority,
    /// Children marked w.p. b_ε at birth; marked voters are fair coins.
    Marked,
    /// Marked iff the subordinator jumps above the truncation level within the lifetime.
    ExpMarked,
    /// Bernoulli marks; marked voters vote 1.
    BiasedPlus,
    /// Bernoulli marks; marked voters vote 0.
    BiasedMinus,
}

impl SchemeKind {
    pub fn name(&self) -> &'static str {
        match self {
            SchemeKind::Majority => "majority",
            SchemeKind::Marked => "marked",
            SchemeKind::ExpMarked => "exp-marked",
            SchemeKind::BiasedPlus => "biased-plus",
            SchemeKind::BiasedMinus => "biased-minus",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        Ok(match s.trim() {
            "majority" => SchemeKind::Majority,
            "marked" => SchemeKind::Marked,
            "exp-marked" => SchemeKind::ExpMarked,
            "biased-plus" => SchemeKind::BiasedPlus,
            "biased-minus" => SchemeKind::BiasedMinus,
            other => return domain(format!("unknown scheme '{other}'")),
        })
    }

    /// Probability that a marked individual votes 1 (None: no marks).
    pub fn marked_vote(&self) -> Option<f64> {
        match self {
            SchemeKind::Majority => None,
            SchemeKind::Marked | SchemeKind::ExpMarked => Some(0.5),
            SchemeKind::BiasedPlus => Some(1.0),
            SchemeKind::BiasedMinus => Some(0.0),
        }
    }

    /// Marks drawn as Bernoulli(b_ε) at birth (root exempt).
    pub fn bernoulli_marks(&self) -> bool {
        matches!(self, SchemeKind::Marked | SchemeKind::BiasedPlus | SchemeKind::BiasedMinus)
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct VoteScheme {
    pub kind: SchemeKind,
    pub initial: InitialCondition,
}

impl VoteScheme {
    pub fn new(kind: SchemeKind, initial: InitialCondition) -> Self {
        VoteScheme { kind, initial }
    }
}

/// Exact root-vote-1 probability given the tree and its leaf positions.
///
/// Values are conditional on the node being unmarked; the root is never
/// marked, so the root value is the answer.
pub fn dp_root_probability(tree: &BranchingTree, scheme: &VoteScheme, b: f64) -> Result<f64> {
    if scheme.kind == SchemeKind::ExpMarked {
        return Err(Error::SchemeMismatch(
            "exponential marks correlate with the spatial path; sample instead".into(),
        ));
    }
    let m = scheme.kind.marked_vote();
    let mut value = vec![0.0; tree.nodes.len()];
    for i in (0..tree.nodes.len()).rev() {
        let node = &tree.nodes[i];
        value[i] = match node.children {
            None => scheme.initial.eval(&node.end),
            Some(c) => {
                let v = [value[c[0]], value[c[1]], value[c[2]]];
                match m {
                    None => g(v[0], v[1], v[2]),
                    Some(m) => g_marked(v, b, m),
                }
            }
        };
    }
    Ok(value[0])
}

/// One Bernoulli realisation of the root vote on a realised tree with marks.
///
/// Votes come from each individual's own vote stream, so this agrees with the
/// lazy evaluator on the same replicate.
pub fn sample_root_vote(tree: &BranchingTree, marks: Option<&[bool]>, scheme: &VoteScheme) -> Result<bool> {
    let mark_vote = scheme.kind.marked_vote();
    let marks = match (mark_vote, marks) {
        (None, None) => None,
        (Some(_), Some(m)) if m.len() == tree.nodes.len() => Some(m),
        (None, Some(_)) => return Err(Error::SchemeMismatch("majority voting takes no marks".into())),
        _ => return Err(Error::SchemeMismatch(format!("{} voting needs one mark per node", scheme.kind.name()))),
    };
    let mut vote = vec![false; tree.nodes.len()];
    for i in (0..tree.nodes.len()).rev() {
        let node = &tree.nodes[i];
        let marked = marks.is_some_and(|m| m[i]);
        vote[i] = if marked {
            node.key.rng(Purpose::Vote).random::<f64>() < mark_vote.unwrap_or(0.5)
        } else {
            match node.children {
                None => node.key.rng(Purpose::Vote).random::<f64>() < scheme.initial.eval(&node.end),
                Some(c) => (vote[c[0]] as u8 + vote[c[1]] as u8 + vote[c[2]] as u8) >= 2,
            }
        };
    }
    Ok(vote[0])
}
