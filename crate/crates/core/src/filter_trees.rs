//! Lazy trees over a space's approximations and the constructions on them:
//! filter-tree validation, intersection, fusion into a node set, countable
//! fusion against avoided sets, the G/F/H partition engine, cube ↔ tree
//! conversion and diagonalization to a real.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;
use std::sync::{Arc, Mutex};

use serde::Serialize;
use serde_json::{json, Value};
use thiserror::Error;

use crate::spaces::{Approx, Real, SpaceError, SpaceInstance, SpaceKind};
use crate::star_core::{chain_witness, Chain, FilterOracle, PeriodicSet, StarError, Tri};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TreeError {
    #[error("degenerate intersection: {0}")]
    Degenerate(String),
    #[error("largeness promise fails at node {0}")]
    PromiseViolated(Approx),
    #[error("stem {0} is not in the target node set")]
    StemNotInH(Approx),
    #[error("exact mode needs level {stem_len}+1, got level {level}")]
    ModeUnsupported { level: usize, stem_len: usize },
    #[error("neither side is large at {0}; use finite mode")]
    Undecided(Approx),
    #[error("the cube is empty")]
    EmptyCube,
    #[error("branching at {0} is not large ({1})")]
    NotLarge(Approx, Tri),
    #[error("tree does not validate at {0}")]
    ValidationFailed(Approx),
    #[error("operation not supported for the {0} space")]
    UnsupportedSpace(String),
    #[error("set determined at level {level} cannot be avoided below stem {stem}")]
    NotNull { level: usize, stem: Approx },
    #[error(transparent)]
    Star(#[from] StarError),
}

impl From<SpaceError> for TreeError {
    fn from(e: SpaceError) -> Self {
        match e {
            SpaceError::EmptyCube => TreeError::EmptyCube,
            other => TreeError::UnsupportedSpace(other.to_string()),
        }
    }
}

type CodeGenerator = Arc<dyn Fn(u64) -> Vec<u64> + Send + Sync>;

/// Extension codes of a node inside a tree.
#[derive(Clone)]
pub enum BranchSet {
    Explicit(BTreeSet<u64>),
    Described(PeriodicSet),
    /// Enumerator of the codes `<= bound`; largeness is not decidable.
    Generated(CodeGenerator),
}

impl fmt::Debug for BranchSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            BranchSet::Explicit(c) => f.debug_tuple("Explicit").field(c).finish(),
            BranchSet::Described(p) => write!(f, "Described({p})"),
            BranchSet::Generated(_) => f.write_str("Generated"),
        }
    }
}

impl BranchSet {
    pub fn explicit(codes: impl IntoIterator<Item = u64>) -> BranchSet {
        BranchSet::Explicit(codes.into_iter().collect())
    }

    pub fn contains(&self, code: u64) -> bool {
        match self {
            BranchSet::Explicit(c) => c.contains(&code),
            BranchSet::Described(p) => p.contains(code),
            BranchSet::Generated(g) => g(code).contains(&code),
        }
    }

    pub fn as_periodic(&self) -> Option<PeriodicSet> {
        match self {
            BranchSet::Explicit(c) => Some(PeriodicSet::finite(c.iter().copied())),
            BranchSet::Described(p) => Some(p.clone()),
            BranchSet::Generated(_) => None,
        }
    }

    pub fn largeness(&self, oracle: &FilterOracle, universe: &PeriodicSet) -> Tri {
        match self.as_periodic() {
            Some(p) => oracle.large(&p.intersect(universe)),
            None => Tri::Unknown,
        }
    }

    pub fn intersect(&self, other: &BranchSet) -> BranchSet {
        match (self.as_periodic(), other.as_periodic()) {
            (Some(a), Some(b)) => BranchSet::Described(a.intersect(&b)),
            _ => {
                let (a, b) = (self.clone(), other.clone());
                BranchSet::Generated(Arc::new(move |bound| {
                    let keep: BTreeSet<u64> = codes_of(&b, bound).into_iter().collect();
                    codes_of(&a, bound).into_iter().filter(|c| keep.contains(c)).collect()
                }))
            }
        }
    }

    pub fn without(&self, removed: &BTreeSet<u64>) -> BranchSet {
        self.intersect(&BranchSet::Described(PeriodicSet::finite(removed.iter().copied()).complement()))
    }
}

fn codes_of(b: &BranchSet, bound: u64) -> Vec<u64> {
    match b {
        BranchSet::Explicit(c) => c.range(..=bound).copied().collect(),
        BranchSet::Described(p) => p.members_up_to(bound),
        BranchSet::Generated(g) => g(bound),
    }
}

type CodesFn = Arc<dyn Fn(&Approx) -> PeriodicSet + Send + Sync>;

pub type BranchRule = Arc<dyn Fn(&Approx) -> BranchSet + Send + Sync>;

/// A tree given by its stem and a memoized branching rule for the nodes at
/// or above the stem. Nodes below the stem are its prefixes.
#[derive(Clone)]
pub struct LazyTree {
    space: Arc<dyn SpaceInstance>,
    stem: Approx,
    bound: u64,
    rule: BranchRule,
    memo: Arc<Mutex<HashMap<Approx, BranchSet>>>,
}

impl fmt::Debug for LazyTree {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("LazyTree")
            .field("space", &self.space.name())
            .field("stem", &self.stem)
            .field("bound", &self.bound)
            .finish()
    }
}

impl LazyTree {
    /// `bound` caps the elements explored when enumerating nodes.
    pub fn new(
        space: Arc<dyn SpaceInstance>,
        stem: Approx,
        bound: u64,
        rule: impl Fn(&Approx) -> BranchSet + Send + Sync + 'static,
    ) -> LazyTree {
        LazyTree { space, stem, bound, rule: Arc::new(rule), memo: Arc::new(Mutex::new(HashMap::new())) }
    }

    /// Every extension of every node above `stem`.
    pub fn full(space: Arc<dyn SpaceInstance>, stem: Approx, bound: u64) -> LazyTree {
        let sp = space.clone();
        LazyTree::new(space, stem, bound, move |s| BranchSet::Described(sp.universe(s)))
    }

    /// The same branching set of codes at every node.
    pub fn uniform(space: Arc<dyn SpaceInstance>, stem: Approx, bound: u64, codes: PeriodicSet) -> LazyTree {
        LazyTree::new(space, stem, bound, move |_| BranchSet::Described(codes.clone()))
    }

    pub fn space(&self) -> &Arc<dyn SpaceInstance> {
        &self.space
    }

    pub fn stem(&self) -> &Approx {
        &self.stem
    }

    pub fn bound(&self) -> u64 {
        self.bound
    }

    pub fn with_bound(&self, bound: u64) -> LazyTree {
        LazyTree { bound, ..self.clone() }
    }

    /// Branching at a node at or above the stem.
    pub fn branch(&self, s: &Approx) -> BranchSet {
        if let Some(b) = self.memo.lock().expect("memo lock").get(s) {
            return b.clone();
        }
        let b = (self.rule)(s);
        self.memo.lock().expect("memo lock").insert(s.clone(), b.clone());
        b
    }

    pub fn contains(&self, node: &Approx) -> bool {
        let k = self.stem.len();
        if node.len() <= k {
            return self.stem.prefix(node.len()) == *node;
        }
        if !self.stem.is_prefix_of(node) {
            return false;
        }
        (k..node.len()).all(|i| {
            let parent = node.prefix(i);
            match self.space.code(&parent, &node.prefix(i + 1)) {
                Some(c) => self.space.universe(&parent).contains(c) && self.branch(&parent).contains(c),
                None => false,
            }
        })
    }

    /// Codes of the children of `s` inside the bound.
    pub fn child_codes(&self, s: &Approx) -> Vec<u64> {
        if s.len() < self.stem.len() {
            let next = self.stem.prefix(s.len() + 1);
            return self.space.code(s, &next).into_iter().collect();
        }
        let branch = self.branch(s);
        let universe = self.space.universe(s);
        self.space
            .codes_up_to(s, self.bound)
            .into_iter()
            .filter(|&c| universe.contains(c) && branch.contains(c))
            .collect()
    }

    pub fn children(&self, s: &Approx) -> Vec<Approx> {
        self.child_codes(s).into_iter().map(|c| self.space.child(s, c).expect("code in universe")).collect()
    }

    /// Nodes of length `n` inside the bound.
    pub fn level(&self, n: usize) -> Vec<Approx> {
        if n <= self.stem.len() {
            return vec![self.stem.prefix(n)];
        }
        let mut cur = vec![self.stem.clone()];
        for _ in self.stem.len()..n {
            cur = cur.iter().flat_map(|s| self.children(s)).collect();
        }
        cur
    }

    /// Nodes from the stem up to `depth` levels above it, level by level.
    pub fn nodes_above_stem(&self, depth: usize) -> Vec<Approx> {
        let mut out = Vec::new();
        let mut cur = vec![self.stem.clone()];
        for _ in 0..=depth {
            out.extend(cur.iter().cloned());
            cur = cur.iter().flat_map(|s| self.children(s)).collect();
        }
        out
    }

    pub fn largeness(&self, s: &Approx, oracle: &FilterOracle) -> Tri {
        self.branch(s).largeness(oracle, &self.space.universe(s))
    }

    /// The subtree of nodes comparable with `s`, which must be in the tree
    /// at or above the stem.
    pub fn restrict(&self, s: &Approx) -> LazyTree {
        LazyTree { stem: s.clone(), ..self.clone() }
    }
}

/// Node sets of two trees agree up to `depth` levels above `a`'s stem.
pub fn same_nodes(a: &LazyTree, b: &LazyTree, depth: usize) -> bool {
    a.stem == b.stem && a.nodes_above_stem(depth) == b.nodes_above_stem(depth)
}

/// `s ↦ F(s)`: which filter decides largeness at each node.
#[derive(Clone)]
pub struct FilterAssignment {
    rule: Arc<dyn Fn(&Approx) -> FilterOracle + Send + Sync>,
}

impl fmt::Debug for FilterAssignment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("FilterAssignment")
    }
}

impl FilterAssignment {
    pub fn new(rule: impl Fn(&Approx) -> FilterOracle + Send + Sync + 'static) -> FilterAssignment {
        FilterAssignment { rule: Arc::new(rule) }
    }

    pub fn constant(oracle: FilterOracle) -> FilterAssignment {
        FilterAssignment::new(move |_| oracle.clone())
    }

    pub fn at(&self, s: &Approx) -> FilterOracle {
        (self.rule)(s)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct Validation {
    pub value: Tri,
    pub witness: Option<Approx>,
    pub nodes_checked: u64,
}

/// Three-valued check that every node from the stem up to `depth - 1`
/// levels above it has large branching. A `False` node outranks `Unknown`.
pub fn validate_filter_tree(t: &LazyTree, f: &FilterAssignment, depth: usize) -> Validation {
    let mut value = Tri::True;
    let mut witness = None;
    let mut checked = 0;
    let mut cur = vec![t.stem.clone()];
    for _ in 0..depth {
        for s in &cur {
            checked += 1;
            let v = t.largeness(s, &f.at(s));
            if v == Tri::False {
                return Validation { value: Tri::False, witness: Some(s.clone()), nodes_checked: checked };
            }
            if v == Tri::Unknown && value == Tri::True {
                value = Tri::Unknown;
                witness = Some(s.clone());
            }
        }
        cur = cur.iter().flat_map(|s| t.children(s)).collect();
    }
    Validation { value, witness, nodes_checked: checked }
}

/// Whether the intersection of two trees keeps a stem: one stem extends the
/// other and lies in the other tree.
pub fn stem_condition(s: &LazyTree, t: &LazyTree) -> bool {
    (t.stem.is_prefix_of(&s.stem) && t.contains(&s.stem)) || (s.stem.is_prefix_of(&t.stem) && s.contains(&t.stem))
}

/// Node-wise intersection; `Degenerate` when the stem condition fails.
/// The result is validated against `f` up to `depth`.
pub fn intersect_trees(s: &LazyTree, t: &LazyTree, f: &FilterAssignment, depth: usize) -> Result<LazyTree, TreeError> {
    if !stem_condition(s, t) {
        return Err(TreeError::Degenerate(format!("stems {} and {} fail the stem condition", s.stem, t.stem)));
    }
    let stem = if s.stem.len() >= t.stem.len() { s.stem.clone() } else { t.stem.clone() };
    let (a, b) = (s.clone(), t.clone());
    let out = LazyTree::new(s.space.clone(), stem, s.bound.min(t.bound), move |u| a.branch(u).intersect(&b.branch(u)));
    let v = validate_filter_tree(&out, f, depth);
    if v.value == Tri::False {
        return Err(TreeError::ValidationFailed(v.witness.expect("false has a witness")));
    }
    Ok(out)
}

/// A set of nodes together with, for each node, the periodic set of codes
/// of its children lying in the set.
#[derive(Clone)]
pub struct NodeSet {
    contains: Arc<dyn Fn(&Approx) -> bool + Send + Sync>,
    child_codes: Arc<dyn Fn(&Approx) -> PeriodicSet + Send + Sync>,
}

impl NodeSet {
    pub fn new(
        contains: impl Fn(&Approx) -> bool + Send + Sync + 'static,
        child_codes: impl Fn(&Approx) -> PeriodicSet + Send + Sync + 'static,
    ) -> NodeSet {
        NodeSet { contains: Arc::new(contains), child_codes: Arc::new(child_codes) }
    }

    pub fn everything() -> NodeSet {
        NodeSet::new(|_| true, |_| PeriodicSet::all())
    }

    /// Nodes whose every one-step code along the way, from the empty node,
    /// lies in `codes(parent)`.
    pub fn code_tree(
        space: Arc<dyn SpaceInstance>,
        codes: impl Fn(&Approx) -> PeriodicSet + Send + Sync + 'static,
    ) -> NodeSet {
        let codes = Arc::new(codes);
        let c2 = codes.clone();
        NodeSet::new(
            move |s| {
                (0..s.len()).all(|i| {
                    let p = s.prefix(i);
                    space.code(&p, &s.prefix(i + 1)).is_some_and(|c| codes(&p).contains(c))
                })
            },
            move |s| c2(s),
        )
    }

    pub fn contains(&self, s: &Approx) -> bool {
        (self.contains)(s)
    }

    pub fn codes(&self, s: &Approx) -> PeriodicSet {
        (self.child_codes)(s)
    }
}

/// Shrinks `T` to the nodes reachable from its stem through `H`, level by
/// level. The largeness promise is checked on every node reached within
/// `depth` levels of the stem and the bound.
pub fn fuse_into_h(t: &LazyTree, f: &FilterAssignment, h: &NodeSet, depth: usize) -> Result<LazyTree, TreeError> {
    if !h.contains(&t.stem) {
        return Err(TreeError::StemNotInH(t.stem.clone()));
    }
    let (base, hh) = (t.clone(), h.clone());
    let out = LazyTree::new(t.space.clone(), t.stem.clone(), t.bound, move |s| {
        base.branch(s).intersect(&BranchSet::Described(hh.codes(s)))
    });
    let mut level = vec![out.stem.clone()];
    for _ in 0..depth {
        for s in &level {
            if out.largeness(s, &f.at(s)) != Tri::True {
                return Err(TreeError::PromiseViolated(s.clone()));
            }
        }
        level = level.iter().flat_map(|s| out.children(s)).collect();
    }
    Ok(out)
}

/// Maps a tree with stem `t` to a subtree with the same stem that avoids
/// one target set.
pub type ShrinkRule = Arc<dyn Fn(&LazyTree) -> Result<LazyTree, TreeError> + Send + Sync>;

/// Avoider for `{Y : r_level(Y) ∈ forbidden}`: drops the forbidden nodes
/// from the tree. Finitely many codes disappear per node, so largeness
/// under a nonprincipal filter survives.
pub fn prune_level(level: usize, forbidden: BTreeSet<Approx>) -> ShrinkRule {
    let forbidden = Arc::new(forbidden);
    Arc::new(move |r: &LazyTree| {
        if level <= r.stem.len() {
            if forbidden.contains(&r.stem.prefix(level)) {
                return Err(TreeError::NotNull { level, stem: r.stem.clone() });
            }
            return Ok(r.clone());
        }
        let (base, forb, space) = (r.clone(), forbidden.clone(), r.space.clone());
        Ok(LazyTree::new(r.space.clone(), r.stem.clone(), r.bound, move |u| {
            let b = base.branch(u);
            if u.len() + 1 != level {
                return b;
            }
            let removed: BTreeSet<u64> =
                forb.iter().filter(|x| u.is_prefix_of(x)).filter_map(|x| space.code(u, x)).collect();
            if removed.is_empty() {
                b
            } else {
                b.without(&removed)
            }
        }))
    })
}

/// Avoider removing one child code at the stem of whatever tree it gets.
pub fn remove_child_at_stem(code: u64) -> ShrinkRule {
    Arc::new(move |r: &LazyTree| {
        let (base, stem) = (r.clone(), r.stem.clone());
        Ok(LazyTree::new(r.space.clone(), r.stem.clone(), r.bound, move |u| {
            let b = base.branch(u);
            if *u == stem {
                b.without(&BTreeSet::from([code]))
            } else {
                b
            }
        }))
    })
}

/// Countable fusion for finitely many avoiders: avoider `k` is applied to
/// the subtree at each node `k` levels above the stem, and the branching of
/// the result at `s` is taken from the subtree built for `s`.
pub fn sigma_fuse(
    t: &LazyTree,
    f: &FilterAssignment,
    avoiders: &[ShrinkRule],
    depth: usize,
) -> Result<LazyTree, TreeError> {
    if avoiders.is_empty() {
        return Ok(t.clone());
    }
    let base = t.stem.len();
    let last = base + avoiders.len() - 1;
    let mut built: HashMap<Approx, LazyTree> = HashMap::new();
    let root = avoiders[0](t)?;
    built.insert(t.stem.clone(), root);
    let mut frontier = vec![t.stem.clone()];
    for rule in &avoiders[1..] {
        let mut next = Vec::new();
        for parent in &frontier {
            let sp = built[parent].clone();
            for child in sp.children(parent) {
                let sub = rule(&sp.restrict(&child))?;
                built.insert(child.clone(), sub);
                next.push(child);
            }
        }
        frontier = next;
    }
    let built = Arc::new(built);
    let out = LazyTree::new(t.space.clone(), t.stem.clone(), t.bound, move |s| {
        match built.get(&s.prefix(s.len().min(last))) {
            Some(sub) => sub.branch(s),
            None => BranchSet::explicit([]),
        }
    });
    let v = validate_filter_tree(&out, f, depth);
    if v.value == Tri::False {
        return Err(TreeError::ValidationFailed(v.witness.expect("false has a witness")));
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum Label {
    G,
    F,
    H,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "camelCase")]
pub enum Verdict {
    Inside,
    Outside,
    HereditarilyUndecided,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "camelCase")]
pub enum Mode {
    /// One level above the stem, decided by the filter oracle.
    Exact,
    /// Nodes with elements `<= ground`; "large" means at least `threshold`
    /// children.
    Finite { ground: u64, threshold: usize },
}

/// A set of level-`level` nodes, with an optional per-parent periodic
/// description of the codes of children in the set.
#[derive(Clone)]
pub struct LevelTarget {
    pub level: usize,
    member: Arc<dyn Fn(&Approx) -> bool + Send + Sync>,
    described: Option<CodesFn>,
}

impl LevelTarget {
    pub fn new(level: usize, member: impl Fn(&Approx) -> bool + Send + Sync + 'static) -> LevelTarget {
        LevelTarget { level, member: Arc::new(member), described: None }
    }

    pub fn with_codes(mut self, codes: impl Fn(&Approx) -> PeriodicSet + Send + Sync + 'static) -> LevelTarget {
        self.described = Some(Arc::new(codes));
        self
    }

    pub fn contains(&self, s: &Approx) -> bool {
        (self.member)(s)
    }

    /// Ellentuck target from a predicate on sorted element lists.
    pub fn of_sets(level: usize, member: impl Fn(&[u64]) -> bool + Send + Sync + 'static) -> LevelTarget {
        LevelTarget::new(level, move |s| member(&s.elements()))
    }
}

#[derive(Debug, Clone)]
pub struct Partition {
    pub labels: BTreeMap<Approx, Label>,
    pub tree: LazyTree,
    pub verdict: Verdict,
}

/// Labels nodes by whether a homogeneous subtree into the target (G) or its
/// complement (F) hangs below them, and returns a subtree realizing the
/// stem's label.
pub fn gfh_partition(
    t: &LazyTree,
    f: &FilterAssignment,
    target: &LevelTarget,
    mode: Mode,
) -> Result<Partition, TreeError> {
    let n = target.level;
    let stem = t.stem.clone();
    if n <= stem.len() {
        let inside = target.contains(&stem.prefix(n));
        let label = if inside { Label::G } else { Label::F };
        let verdict = if inside { Verdict::Inside } else { Verdict::Outside };
        return Ok(Partition { labels: BTreeMap::from([(stem, label)]), tree: t.clone(), verdict });
    }
    match mode {
        Mode::Exact => {
            if n != stem.len() + 1 {
                return Err(TreeError::ModeUnsupported { level: n, stem_len: stem.len() });
            }
            let space = t.space.clone();
            let inside_codes = match &target.described {
                Some(d) => d(&stem),
                None => {
                    return Err(TreeError::ModeUnsupported { level: n, stem_len: stem.len() });
                }
            };
            let universe = space.universe(&stem);
            let branch = t.branch(&stem);
            let oracle = f.at(&stem);
            let inside = branch.intersect(&BranchSet::Described(inside_codes.clone()));
            let outside = branch.intersect(&BranchSet::Described(inside_codes.complement()));
            let (verdict, keep) = if inside.largeness(&oracle, &universe) == Tri::True {
                (Verdict::Inside, inside_codes)
            } else if outside.largeness(&oracle, &universe) == Tri::True {
                (Verdict::Outside, inside_codes.complement())
            } else {
                return Err(TreeError::Undecided(stem));
            };
            let label = if verdict == Verdict::Inside { Label::G } else { Label::F };
            let (base, st) = (t.clone(), stem.clone());
            let tree = LazyTree::new(space, stem.clone(), t.bound, move |u| {
                let b = base.branch(u);
                if *u == st {
                    b.intersect(&BranchSet::Described(keep.clone()))
                } else {
                    b
                }
            });
            Ok(Partition { labels: BTreeMap::from([(stem, label)]), tree, verdict })
        }
        Mode::Finite { ground, threshold } => {
            let bounded = t.with_bound(ground);
            let mut flags: HashMap<Approx, (bool, bool)> = HashMap::new();
            let mut levels = vec![vec![stem.clone()]];
            for _ in stem.len()..n {
                let next = levels.last().expect("nonempty").iter().flat_map(|s| bounded.children(s)).collect();
                levels.push(next);
            }
            for s in levels.last().expect("nonempty") {
                let inside = target.contains(s);
                flags.insert(s.clone(), (inside, !inside));
            }
            for lvl in levels.iter().rev().skip(1) {
                for s in lvl {
                    let kids = bounded.children(s);
                    let g = kids.iter().filter(|c| flags[*c].0).count() >= threshold;
                    let fl = kids.iter().filter(|c| flags[*c].1).count() >= threshold;
                    flags.insert(s.clone(), (g, fl));
                }
            }
            let label_of = |fl: (bool, bool)| match fl {
                (true, _) => Label::G,
                (false, true) => Label::F,
                _ => Label::H,
            };
            let labels: BTreeMap<Approx, Label> = flags.iter().map(|(k, &v)| (k.clone(), label_of(v))).collect();
            let stem_label = labels[&stem];
            let verdict = match stem_label {
                Label::G => Verdict::Inside,
                Label::F => Verdict::Outside,
                Label::H => Verdict::HereditarilyUndecided,
            };
            let keep: Arc<dyn Fn(&Approx) -> bool + Send + Sync> = {
                let flags = Arc::new(flags.clone());
                let labels = Arc::new(labels.clone());
                match stem_label {
                    Label::G => Arc::new(move |c| flags.get(c).is_some_and(|f| f.0)),
                    Label::F => Arc::new(move |c| flags.get(c).is_some_and(|f| f.1)),
                    Label::H => Arc::new(move |c| labels.get(c) == Some(&Label::H)),
                }
            };
            let (base, space) = (bounded.clone(), t.space.clone());
            let tree = LazyTree::new(t.space.clone(), stem, ground, move |u| {
                if u.len() >= n {
                    return base.branch(u);
                }
                BranchSet::explicit(
                    base.child_codes(u).into_iter().filter(|&c| keep(&space.child(u, c).expect("valid code"))),
                )
            });
            Ok(Partition { labels, tree, verdict })
        }
    }
}

/// Subtree whose level-`n` nodes all lie in `A` or all lie outside it,
/// obtained from the partition of the lifted set `{Y : r_n(Y) ∈ A}`.
pub fn homogenize_level_n(
    t: &LazyTree,
    f: &FilterAssignment,
    a: &LevelTarget,
    mode: Mode,
) -> Result<Partition, TreeError> {
    // a set determined by r_n is already labelled on level n, so lifting it
    // is the identity on labels
    gfh_partition(t, f, a, mode)
}

/// Tree with stem `s` whose branches are the cube `[s, X]`.
pub fn tree_from_cube(
    space: Arc<dyn SpaceInstance>,
    s: &Approx,
    x: &Real,
    oracle: &FilterOracle,
    bound: u64,
) -> Result<LazyTree, TreeError> {
    let first = space.extension_codes(s, x, bound)?;
    if first.is_empty() && space.described_extension_codes(s, x).is_none_or(|p| p.is_empty()) {
        return Err(TreeError::EmptyCube);
    }
    let (sp, xx) = (space.clone(), x.clone());
    let tree = LazyTree::new(space.clone(), s.clone(), bound, move |u| match sp.described_extension_codes(u, &xx) {
        Some(p) => BranchSet::Described(p),
        None => {
            let (sp2, x2, u2) = (sp.clone(), xx.clone(), u.clone());
            BranchSet::Generated(Arc::new(move |b| sp2.extension_codes(&u2, &x2, b).unwrap_or_default()))
        }
    });
    let v = tree.largeness(s, oracle);
    if v != Tri::True {
        return Err(TreeError::NotLarge(s.clone(), v));
    }
    Ok(tree)
}

/// Builds `X ⊒ s` with `[s, X]` inside `T` up to `depth` levels above `s`:
/// `X_0` is the branching at `s`, each later `X_i` also meets the branching
/// at every `s ∪ F` with `F` a set of fewer than `depth` earlier picks, and
/// each pick is the least element of `X_i` above the previous one.
pub fn diagonalize_to_real(t: &LazyTree, oracle: &FilterOracle, s: &Approx, depth: usize) -> Result<Real, TreeError> {
    if t.space.kind() != SpaceKind::Ellentuck {
        return Err(TreeError::UnsupportedSpace(t.space.name()));
    }
    let v = validate_filter_tree(t, &FilterAssignment::constant(oracle.clone()), depth);
    if v.value != Tri::True {
        return Err(TreeError::ValidationFailed(v.witness.unwrap_or_else(|| t.stem.clone())));
    }
    if !t.contains(s) || s.len() < t.stem.len() {
        return Err(TreeError::ValidationFailed(s.clone()));
    }
    let head = s.elements();
    let state = Arc::new(Mutex::new(Diagonal::new(t.clone(), head.clone(), depth)));
    let first = state.lock().expect("diagonal lock").pick(0);
    if first.is_none() {
        return Err(TreeError::EmptyCube);
    }
    let len = head.len();
    Ok(Real::from_fn(move |i| {
        if i < len {
            head[i]
        } else {
            state.lock().expect("diagonal lock").pick(i - len).expect("large branching never runs dry")
        }
    }))
}

struct Diagonal {
    tree: LazyTree,
    head: Vec<u64>,
    depth: usize,
    picks: Vec<u64>,
    current: Option<PeriodicSet>,
}

impl Diagonal {
    fn new(tree: LazyTree, head: Vec<u64>, depth: usize) -> Diagonal {
        Diagonal { tree, head, depth, picks: Vec::new(), current: None }
    }

    fn branching(&self, extra: &[u64]) -> PeriodicSet {
        let mut node = self.head.clone();
        node.extend_from_slice(extra);
        let node = Approx::Set(node);
        let universe = self.tree.space.universe(&node);
        match self.tree.branch(&node).as_periodic() {
            Some(p) => p.intersect(&universe),
            None => PeriodicSet::empty(),
        }
    }

    fn pick(&mut self, i: usize) -> Option<u64> {
        while self.picks.len() <= i {
            let mut set = match &self.current {
                None => self.branching(&[]),
                Some(prev) => prev.clone(),
            };
            if let Some(&last) = self.picks.last() {
                // new constraints: subsets of the picks that contain the last pick
                let earlier = &self.picks[..self.picks.len() - 1];
                for size in 0..self.depth.saturating_sub(1) {
                    for sub in crate::pigeonhole_kernels::k_subsets(earlier.len() as u64, size) {
                        let mut f: Vec<u64> = sub.iter().map(|&j| earlier[j as usize]).collect();
                        f.push(last);
                        set = set.intersect(&self.branching(&f));
                    }
                }
            }
            let from = self.picks.last().map_or(self.head.last().map_or(0, |m| m + 1), |m| m + 1);
            let next = set.next_member(from)?;
            self.picks.push(next);
            self.current = Some(set);
        }
        Some(self.picks[i])
    }
}

/// Three-valued check that every node of the cube `[∅, X]` up to length
/// `depth - 1`, with elements `<= bound`, has large extension set.
pub fn r_alpha_member(space: &dyn SpaceInstance, x: &Real, f: &FilterAssignment, depth: usize, bound: u64) -> Tri {
    let mut value = Tri::True;
    let mut level = vec![space.empty()];
    for _ in 0..depth {
        let mut next = Vec::new();
        for s in &level {
            let v = match space.described_extension_codes(s, x) {
                Some(p) => f.at(s).large(&p),
                None => Tri::Unknown,
            };
            value = value.and(v);
            if value == Tri::False {
                return value;
            }
            if let Ok(codes) = space.extension_codes(s, x, bound) {
                next.extend(codes.into_iter().map(|c| space.child(s, c).expect("valid code")));
            }
        }
        level = next;
    }
    value
}

const ALPHA_HORIZON: usize = 12;

fn alpha_oracle(space: &Arc<dyn SpaceInstance>, s: &Approx) -> Result<FilterOracle, StarError> {
    let canonical = space.canonical_real();
    let (sp, node) = (space.clone(), s.clone());
    let floor = s.floor();
    let chain = Chain::lazy(ALPHA_HORIZON, move |i| {
        // drop the extensions already below r_n of the canonical real
        let n = (floor + i as u64) as usize;
        let below = canonical.rn(n);
        let top = below.max_element().unwrap_or(0);
        let removed: Vec<u64> = if n == 0 {
            vec![]
        } else {
            sp.codes_up_to(&node, top)
                .into_iter()
                .filter(|&c| sp.child(&node, c).is_some_and(|t| sp.lefin(&t, &below)))
                .collect()
        };
        sp.universe(&node).difference(&PeriodicSet::finite(removed))
    });
    Ok(chain_witness(&chain)?.as_oracle())
}

/// Filter assignment whose filter at `s` is generated by a germ lying in
/// every extension set of `s` that avoids the extensions below `r_n` of the
/// canonical real, for all `n`. Nodes with elements `<= bound` are computed
/// up front so structural failures surface as errors.
pub fn make_alpha_assignment(space: Arc<dyn SpaceInstance>, bound: u64) -> Result<FilterAssignment, StarError> {
    let mut table = HashMap::new();
    for s in space.nodes(bound + 1, (bound + 1) as usize) {
        let o = alpha_oracle(&space, &s)?;
        table.insert(s, o);
    }
    let table = Arc::new(table);
    Ok(FilterAssignment::new(move |s| match table.get(s) {
        Some(o) => o.clone(),
        None => alpha_oracle(&space, s).expect("extension chains are uniform across nodes"),
    }))
}

/// Witness of the finite Ramsey pipeline.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct PipelineOutcome {
    pub verdict: Verdict,
    /// Side of the witness: true when every n-subset lies in the target.
    pub inside: Option<bool>,
    pub witness: Option<Vec<u64>>,
}

/// Finite Ramsey via trees: the cube `[∅, X]` becomes a tree, level `n` is
/// homogenized in finite mode, and a `size`-element set all of whose
/// `n`-subsets stay on one side is searched in the lifted tree of the
/// verdict's side first and then of the other side.
#[allow(clippy::too_many_arguments)]
pub fn ramsey_pipeline(
    n: usize,
    target: &LevelTarget,
    x: &Real,
    oracle: &FilterOracle,
    ground: u64,
    threshold: usize,
    size: usize,
) -> Result<PipelineOutcome, TreeError> {
    let space: Arc<dyn SpaceInstance> = Arc::new(crate::spaces::Ellentuck);
    let cube = tree_from_cube(space.clone(), &space.empty(), x, oracle, ground)?;
    let f = FilterAssignment::constant(oracle.clone());
    let part = homogenize_level_n(&cube, &f, target, Mode::Finite { ground, threshold })?;
    let order = match part.verdict {
        Verdict::Outside => [false, true],
        _ => [true, false],
    };
    let pool: Vec<u64> = x.elements_up_to(ground);
    for inside in order {
        let mut chosen = Vec::new();
        if search_homogeneous(&cube, target, n, inside, &pool, 0, size, &mut chosen) {
            return Ok(PipelineOutcome { verdict: part.verdict, inside: Some(inside), witness: Some(chosen) });
        }
    }
    Ok(PipelineOutcome { verdict: part.verdict, inside: None, witness: None })
}

#[allow(clippy::too_many_arguments)]
fn search_homogeneous(
    tree: &LazyTree,
    target: &LevelTarget,
    n: usize,
    inside: bool,
    pool: &[u64],
    from: usize,
    size: usize,
    chosen: &mut Vec<u64>,
) -> bool {
    if chosen.len() == size {
        return true;
    }
    for i in from..pool.len() {
        let y = pool[i];
        chosen.push(y);
        let ok = if chosen.len() < n {
            tree.contains(&Approx::Set(chosen.clone()))
        } else {
            let prev = &chosen[..chosen.len() - 1];
            crate::pigeonhole_kernels::k_subsets(prev.len() as u64, n - 1).into_iter().all(|sub| {
                let mut node: Vec<u64> = sub.iter().map(|&j| prev[j as usize]).collect();
                node.push(y);
                let node = Approx::Set(node);
                tree.contains(&node) && target.contains(&node) == inside
            })
        };
        if ok && search_homogeneous(tree, target, n, inside, pool, i + 1, size, chosen) {
            return true;
        }
        chosen.pop();
    }
    false
}

/// JSON record of a tree up to a depth.
pub fn tree_certificate(t: &LazyTree, f: &FilterAssignment, depth: usize, verdict: Option<Verdict>) -> Value {
    let nodes = t.nodes_above_stem(depth);
    let report = validate_filter_tree(t, f, depth);
    json!({
        "space": t.space.name(),
        "stem": t.stem,
        "depth": depth,
        "bound": t.bound,
        "nodes": nodes,
        "filterReport": report,
        "verdict": verdict,
    })
}
