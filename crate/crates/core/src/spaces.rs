//! Approximation spaces: finite approximations, replayable reals, the
//! finitization order and the two shipped instances (Ellentuck and
//! Milliken), plus a desk-scale checker for the four axioms.

use std::collections::BTreeSet;
use std::fmt;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use thiserror::Error;

use crate::pigeonhole_kernels::{
    finite_ramsey_search, finite_unions_search, mask_elements, ColoringTable, UnionsColoring,
};
use crate::star_core::PeriodicSet;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SpaceError {
    #[error("the cube [s, X] is empty")]
    EmptyCube,
    #[error("unknown space `{0}`")]
    UnknownSpace(String),
    #[error("node {0} does not belong to the {1} space")]
    BadNode(String, String),
    #[error("set {0} is finite and cannot carry a real")]
    FiniteReal(String),
}

/// A finite approximation: a finite set (Ellentuck) or a finite block
/// sequence (Milliken).
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Approx {
    Set(Vec<u64>),
    Blocks(Vec<Vec<u64>>),
}

impl Approx {
    pub fn len(&self) -> usize {
        match self {
            Approx::Set(s) => s.len(),
            Approx::Blocks(b) => b.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn prefix(&self, n: usize) -> Approx {
        match self {
            Approx::Set(s) => Approx::Set(s[..n.min(s.len())].to_vec()),
            Approx::Blocks(b) => Approx::Blocks(b[..n.min(b.len())].to_vec()),
        }
    }

    pub fn is_prefix_of(&self, other: &Approx) -> bool {
        match (self, other) {
            (Approx::Set(a), Approx::Set(b)) => b.starts_with(a),
            (Approx::Blocks(a), Approx::Blocks(b)) => b.starts_with(a),
            _ => false,
        }
    }

    /// One more than the largest element, or 0 for the empty node.
    pub fn floor(&self) -> u64 {
        self.max_element().map_or(0, |m| m + 1)
    }

    pub fn max_element(&self) -> Option<u64> {
        match self {
            Approx::Set(s) => s.last().copied(),
            Approx::Blocks(b) => b.last().and_then(|blk| blk.last().copied()),
        }
    }

    pub fn elements(&self) -> Vec<u64> {
        match self {
            Approx::Set(s) => s.clone(),
            Approx::Blocks(b) => b.iter().flatten().copied().collect(),
        }
    }
}

impl fmt::Display for Approx {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&serde_json::to_string(self).expect("plain data"))
    }
}

type ElementFn = Arc<dyn Fn(usize) -> u64 + Send + Sync>;
type BlockFn = Arc<dyn Fn(usize) -> Vec<u64> + Send + Sync>;

/// An infinite object given by a deterministic, replayable generator.
#[derive(Clone)]
pub enum Real {
    /// Ellentuck real presented by an infinite periodic set.
    Set(PeriodicSet),
    /// Ellentuck real given by its strictly increasing enumeration.
    Elements(ElementFn),
    /// Milliken real given by its block sequence.
    Blocks(BlockFn),
}

impl fmt::Debug for Real {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Real::Set(s) => write!(f, "Real::Set({s})"),
            Real::Elements(_) => write!(f, "Real::Elements({:?}..)", self.rn(8)),
            Real::Blocks(_) => write!(f, "Real::Blocks({:?}..)", self.rn(4)),
        }
    }
}

impl Real {
    pub fn naturals() -> Real {
        Real::Set(PeriodicSet::all())
    }

    pub fn from_set(set: PeriodicSet) -> Result<Real, SpaceError> {
        if set.is_finite() {
            return Err(SpaceError::FiniteReal(set.to_string()));
        }
        Ok(Real::Set(set))
    }

    pub fn from_fn(f: impl Fn(usize) -> u64 + Send + Sync + 'static) -> Real {
        Real::Elements(Arc::new(f))
    }

    pub fn blocks(f: impl Fn(usize) -> Vec<u64> + Send + Sync + 'static) -> Real {
        Real::Blocks(Arc::new(f))
    }

    /// `({0}, {1}, {2}, …)`.
    pub fn singletons() -> Real {
        Real::blocks(|i| vec![i as u64])
    }

    /// Listed elements followed by every natural `>= tail`.
    pub fn elements_then_tail(prefix: Vec<u64>, tail: u64) -> Real {
        let len = prefix.len();
        Real::from_fn(move |i| if i < len { prefix[i] } else { tail + (i - len) as u64 })
    }

    /// Listed blocks followed by the singletons `{tail}, {tail+1}, …`.
    pub fn blocks_then_singletons(prefix: Vec<Vec<u64>>, tail: u64) -> Real {
        let len = prefix.len();
        Real::blocks(move |i| if i < len { prefix[i].clone() } else { vec![tail + (i - len) as u64] })
    }

    pub fn is_blocks(&self) -> bool {
        matches!(self, Real::Blocks(_))
    }

    /// The `i`-th element of an Ellentuck real.
    pub fn element(&self, i: usize) -> u64 {
        match self {
            Real::Set(s) => s.iter_from(0).nth(i).expect("infinite set"),
            Real::Elements(f) => f(i),
            Real::Blocks(_) => panic!("block real has no element enumeration"),
        }
    }

    /// The `i`-th block of a Milliken real.
    pub fn block(&self, i: usize) -> Vec<u64> {
        match self {
            Real::Blocks(f) => f(i),
            _ => panic!("element real has no block enumeration"),
        }
    }

    pub fn rn(&self, n: usize) -> Approx {
        match self {
            Real::Set(s) => Approx::Set(s.iter_from(0).take(n).collect()),
            Real::Elements(f) => Approx::Set((0..n).map(|i| f(i)).collect()),
            Real::Blocks(f) => Approx::Blocks((0..n).map(|i| f(i)).collect()),
        }
    }

    pub fn ground_set(&self) -> Option<&PeriodicSet> {
        match self {
            Real::Set(s) => Some(s),
            _ => None,
        }
    }

    /// Elements (Ellentuck) `<= bound`.
    pub fn elements_up_to(&self, bound: u64) -> Vec<u64> {
        match self {
            Real::Set(s) => s.members_up_to(bound),
            Real::Elements(f) => (0..).map(|i| f(i)).take_while(|&x| x <= bound).collect(),
            Real::Blocks(_) => panic!("block real has no element enumeration"),
        }
    }

    /// Blocks (Milliken) whose elements are all `<= bound`.
    pub fn blocks_up_to(&self, bound: u64) -> Vec<Vec<u64>> {
        let f = match self {
            Real::Blocks(f) => f,
            _ => panic!("element real has no block enumeration"),
        };
        (0..).map(|i| f(i)).take_while(|b| b.last().is_some_and(|&m| m <= bound)).collect()
    }

    /// Position of the first block (or element) lying entirely above `floor`.
    fn first_index_above(&self, floor: u64) -> usize {
        match self {
            Real::Blocks(f) => (0..).find(|&i| f(i)[0] >= floor).expect("blocks increase"),
            _ => (0..).find(|&i| self.element(i) >= floor).expect("elements increase"),
        }
    }
}

/// `rn(X, n)`.
pub fn rn(x: &Real, n: usize) -> Approx {
    x.rn(n)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SpaceKind {
    Ellentuck,
    Milliken,
}

impl SpaceKind {
    pub fn name(self) -> &'static str {
        match self {
            SpaceKind::Ellentuck => "ellentuck",
            SpaceKind::Milliken => "milliken",
        }
    }
}

/// Least `i <= horizon` with `s ≤_fin r_i(X)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "camelCase")]
pub enum Depth {
    Finite(usize),
    Infinity { horizon: usize },
}

impl Depth {
    pub fn finite(self) -> Option<usize> {
        match self {
            Depth::Finite(d) => Some(d),
            Depth::Infinity { .. } => None,
        }
    }
}

/// The operations the generic engine needs from a space.
///
/// One-step extensions of a node `s` are addressed by natural-number codes:
/// `child(s, c)` is the extension with code `c`, `universe(s)` is the set of
/// valid codes. Codes are increasing in the new piece's elements, so sorting
/// by code gives a reproducible order.
pub trait SpaceInstance: Send + Sync {
    fn kind(&self) -> SpaceKind;

    fn name(&self) -> String {
        self.kind().name().to_string()
    }

    fn empty(&self) -> Approx {
        match self.kind() {
            SpaceKind::Ellentuck => Approx::Set(vec![]),
            SpaceKind::Milliken => Approx::Blocks(vec![]),
        }
    }

    /// Accepts a node in either JSON shape and checks it is well formed.
    fn validate(&self, node: Approx) -> Result<Approx, SpaceError> {
        let bad = || SpaceError::BadNode(node.to_string(), self.name());
        match (self.kind(), &node) {
            (SpaceKind::Ellentuck, Approx::Set(s)) if s.windows(2).all(|w| w[0] < w[1]) => Ok(node),
            (SpaceKind::Milliken, Approx::Set(s)) if s.is_empty() => Ok(Approx::Blocks(vec![])),
            (SpaceKind::Milliken, Approx::Blocks(b)) => {
                let ok = b.iter().all(|blk| !blk.is_empty() && blk.windows(2).all(|w| w[0] < w[1]))
                    && b.windows(2).all(|w| w[0].last() < w[1].first());
                if ok {
                    Ok(node)
                } else {
                    Err(bad())
                }
            }
            _ => Err(bad()),
        }
    }

    fn is_prefix(&self, s: &Approx, t: &Approx) -> bool {
        s.is_prefix_of(t)
    }

    fn lefin(&self, s: &Approx, t: &Approx) -> bool;

    /// `{t : t ≤_fin s}` in (length, lexicographic) order.
    fn downset(&self, s: &Approx) -> Vec<Approx>;

    fn universe(&self, s: &Approx) -> PeriodicSet;

    fn child(&self, s: &Approx, code: u64) -> Option<Approx>;

    fn code(&self, s: &Approx, t: &Approx) -> Option<u64>;

    /// Codes of children whose elements are all `<= bound`, ascending.
    fn codes_up_to(&self, s: &Approx, bound: u64) -> Vec<u64>;

    fn canonical_real(&self) -> Real;

    /// Every node of length `<= max_len` inside `{0..ground-1}`.
    fn nodes(&self, ground: u64, max_len: usize) -> Vec<Approx>;

    /// Codes of `r_{|s|+1}[s, X]` with elements `<= bound`.
    fn extension_codes(&self, s: &Approx, x: &Real, bound: u64) -> Result<Vec<u64>, SpaceError>;

    /// Extension codes as a periodic set when the real allows it.
    fn described_extension_codes(&self, s: &Approx, x: &Real) -> Option<PeriodicSet>;

    /// Random real whose interesting part lives below `ground`.
    fn sample_real(&self, rng: &mut ChaCha8Rng, ground: u64) -> Real;

    /// Random `X ≤ Y`, coarsened below `ground` and equal to `Y` beyond.
    fn sub_real(&self, y: &Real, rng: &mut ChaCha8Rng, ground: u64) -> Real;

    /// `r_d(Y)` followed by the part of `X` above it.
    fn amalgamate(&self, y: &Real, d: usize, x: &Real) -> Real;
}

fn set_of(a: &Approx) -> &[u64] {
    match a {
        Approx::Set(s) => s,
        Approx::Blocks(_) => panic!("expected a set node, got {a}"),
    }
}

fn blocks_of(a: &Approx) -> &[Vec<u64>] {
    match a {
        Approx::Blocks(b) => b,
        Approx::Set(s) if s.is_empty() => &[],
        Approx::Set(_) => panic!("expected a block node, got {a}"),
    }
}

fn is_subset(a: &[u64], b: &[u64]) -> bool {
    let mut it = b.iter();
    a.iter().all(|x| it.any(|y| y == x))
}

/// Infinite subsets of the naturals ordered by inclusion.
#[derive(Debug, Clone, Copy, Default)]
pub struct Ellentuck;

impl SpaceInstance for Ellentuck {
    fn kind(&self) -> SpaceKind {
        SpaceKind::Ellentuck
    }

    fn lefin(&self, s: &Approx, t: &Approx) -> bool {
        is_subset(set_of(s), set_of(t))
    }

    fn downset(&self, s: &Approx) -> Vec<Approx> {
        let s = set_of(s);
        let mut out: Vec<Approx> = (0u64..1 << s.len())
            .map(|m| Approx::Set(mask_elements(m).iter().map(|&i| s[i as usize]).collect()))
            .collect();
        out.sort_by(|a, b| (a.len(), a).cmp(&(b.len(), b)));
        out
    }

    fn universe(&self, s: &Approx) -> PeriodicSet {
        PeriodicSet::tail(s.floor())
    }

    fn child(&self, s: &Approx, code: u64) -> Option<Approx> {
        if code < s.floor() {
            return None;
        }
        let mut v = set_of(s).to_vec();
        v.push(code);
        Some(Approx::Set(v))
    }

    fn code(&self, s: &Approx, t: &Approx) -> Option<u64> {
        let (a, b) = (set_of(s), set_of(t));
        (b.len() == a.len() + 1 && b.starts_with(a)).then(|| b[a.len()])
    }

    fn codes_up_to(&self, s: &Approx, bound: u64) -> Vec<u64> {
        (s.floor()..=bound).collect()
    }

    fn canonical_real(&self) -> Real {
        Real::naturals()
    }

    fn nodes(&self, ground: u64, max_len: usize) -> Vec<Approx> {
        (0..=max_len.min(ground as usize))
            .flat_map(|k| crate::pigeonhole_kernels::k_subsets(ground, k))
            .map(Approx::Set)
            .collect()
    }

    fn extension_codes(&self, s: &Approx, x: &Real, bound: u64) -> Result<Vec<u64>, SpaceError> {
        let els = set_of(s);
        let top = els.last().copied().unwrap_or(0).max(bound);
        let members = x.elements_up_to(top);
        if !is_subset(els, &members) {
            return Err(SpaceError::EmptyCube);
        }
        Ok(members.into_iter().filter(|&m| m >= s.floor() && m <= bound).collect())
    }

    fn described_extension_codes(&self, s: &Approx, x: &Real) -> Option<PeriodicSet> {
        let set = x.ground_set()?;
        if !set_of(s).iter().all(|&e| set.contains(e)) {
            return Some(PeriodicSet::empty());
        }
        Some(set.intersect(&PeriodicSet::tail(s.floor())))
    }

    fn sample_real(&self, rng: &mut ChaCha8Rng, ground: u64) -> Real {
        let prefix: Vec<u64> = (0..ground).filter(|_| rng.gen_bool(0.5)).collect();
        Real::elements_then_tail(prefix, ground)
    }

    fn sub_real(&self, y: &Real, rng: &mut ChaCha8Rng, ground: u64) -> Real {
        let below = y.elements_up_to(ground.saturating_sub(1));
        let kept: Vec<u64> = below.iter().copied().filter(|_| rng.gen_bool(0.5)).collect();
        let skip = below.len();
        let y = y.clone();
        Real::from_fn(move |i| if i < kept.len() { kept[i] } else { y.element(skip + i - kept.len()) })
    }

    fn amalgamate(&self, y: &Real, d: usize, x: &Real) -> Real {
        let head = set_of(&y.rn(d)).to_vec();
        let start = x.first_index_above(head.last().map_or(0, |m| m + 1));
        let x = x.clone();
        Real::from_fn(move |i| if i < head.len() { head[i] } else { x.element(start + i - head.len()) })
    }
}

/// Infinite block sequences ordered by "every block is a union of blocks".
#[derive(Debug, Clone, Copy, Default)]
pub struct Milliken;

/// Is every block of `s` a union of blocks of `t`?
fn blocks_refine(s: &[Vec<u64>], t: &[Vec<u64>]) -> bool {
    s.iter().all(|sb| {
        let mut covered = 0;
        for tb in t {
            let inside = tb.iter().filter(|x| sb.binary_search(x).is_ok()).count();
            if inside == tb.len() {
                covered += inside;
            } else if inside != 0 {
                return false;
            }
        }
        covered == sb.len()
    })
}

fn block_sequences(avail: &[u64], max_len: usize) -> Vec<Vec<Vec<u64>>> {
    // every element is skipped, joins the open block, or opens a new block
    let mut out = vec![vec![]];
    fn go(avail: &[u64], pos: usize, max_len: usize, cur: &mut Vec<Vec<u64>>, out: &mut Vec<Vec<Vec<u64>>>) {
        if pos == avail.len() {
            return;
        }
        let x = avail[pos];
        go(avail, pos + 1, max_len, cur, out);
        if let Some(last) = cur.last_mut() {
            last.push(x);
            out.push(cur.clone());
            go(avail, pos + 1, max_len, cur, out);
            cur.last_mut().expect("nonempty").pop();
        }
        if cur.len() < max_len {
            cur.push(vec![x]);
            out.push(cur.clone());
            go(avail, pos + 1, max_len, cur, out);
            cur.pop();
        }
    }
    go(avail, 0, max_len, &mut vec![], &mut out);
    out
}

impl SpaceInstance for Milliken {
    fn kind(&self) -> SpaceKind {
        SpaceKind::Milliken
    }

    fn lefin(&self, s: &Approx, t: &Approx) -> bool {
        blocks_refine(blocks_of(s), blocks_of(t))
    }

    fn downset(&self, s: &Approx) -> Vec<Approx> {
        // block sequences over the block indices of s, expanded to unions
        let blocks = blocks_of(s);
        let idx: Vec<u64> = (0..blocks.len() as u64).collect();
        let mut out: Vec<Approx> = block_sequences(&idx, blocks.len())
            .into_iter()
            .map(|seq| {
                Approx::Blocks(
                    seq.iter()
                        .map(|ids| ids.iter().flat_map(|&i| blocks[i as usize].iter().copied()).collect())
                        .collect(),
                )
            })
            .collect();
        out.sort_by(|a, b| (a.len(), a).cmp(&(b.len(), b)));
        out.dedup();
        out
    }

    fn universe(&self, _s: &Approx) -> PeriodicSet {
        PeriodicSet::tail(1)
    }

    fn child(&self, s: &Approx, code: u64) -> Option<Approx> {
        if code == 0 {
            return None;
        }
        let floor = s.floor();
        let mut b = blocks_of(s).to_vec();
        b.push(mask_elements(code).into_iter().map(|e| floor + e).collect());
        Some(Approx::Blocks(b))
    }

    fn code(&self, s: &Approx, t: &Approx) -> Option<u64> {
        let (a, b) = (blocks_of(s), blocks_of(t));
        if b.len() != a.len() + 1 || !b.starts_with(a) {
            return None;
        }
        let floor = s.floor();
        let last = &b[a.len()];
        if last.first().is_some_and(|&m| m < floor) || last.last().is_some_and(|&m| m - floor >= 64) {
            return None;
        }
        Some(last.iter().fold(0, |m, &e| m | 1 << (e - floor)))
    }

    fn codes_up_to(&self, s: &Approx, bound: u64) -> Vec<u64> {
        let floor = s.floor();
        if bound < floor {
            return vec![];
        }
        let width = (bound + 1 - floor).min(24);
        (1..1u64 << width).collect()
    }

    fn canonical_real(&self) -> Real {
        Real::singletons()
    }

    fn nodes(&self, ground: u64, max_len: usize) -> Vec<Approx> {
        let avail: Vec<u64> = (0..ground).collect();
        let mut out: Vec<Approx> = block_sequences(&avail, max_len).into_iter().map(Approx::Blocks).collect();
        out.sort_by(|a, b| (a.len(), a).cmp(&(b.len(), b)));
        out
    }

    fn extension_codes(&self, s: &Approx, x: &Real, bound: u64) -> Result<Vec<u64>, SpaceError> {
        let floor = s.floor();
        let head = match s.max_element() {
            Some(m) => x.blocks_up_to(m),
            None => vec![],
        };
        let Some(d) = (0..=head.len()).find(|&i| blocks_refine(blocks_of(s), &head[..i])) else {
            return Err(SpaceError::EmptyCube);
        };
        let rest: Vec<Vec<u64>> = x.blocks_up_to(bound).into_iter().skip(d).filter(|b| b[0] >= floor).collect();
        let masks: Vec<u64> = rest.iter().map(|b| b.iter().fold(0u64, |m, &e| m | 1 << (e - floor))).collect();
        let mut codes: Vec<u64> = (1u64..1 << rest.len())
            .map(|sel| mask_elements(sel).iter().fold(0, |m, &i| m | masks[i as usize]))
            .collect();
        codes.sort_unstable();
        Ok(codes)
    }

    fn described_extension_codes(&self, s: &Approx, x: &Real) -> Option<PeriodicSet> {
        // only the singleton real has a periodic extension-code set
        let canonical = (0..8).all(|i| x.block(i) == vec![i as u64]);
        canonical.then(|| {
            if self.lefin(s, &x.rn(s.floor() as usize)) {
                PeriodicSet::tail(1)
            } else {
                PeriodicSet::empty()
            }
        })
    }

    fn sample_real(&self, rng: &mut ChaCha8Rng, ground: u64) -> Real {
        let mut blocks: Vec<Vec<u64>> = Vec::new();
        let mut open = false;
        for x in 0..ground {
            match rng.gen_range(0..4) {
                0 => {}
                1 if open => blocks.last_mut().expect("open block").push(x),
                _ => {
                    blocks.push(vec![x]);
                    open = true;
                }
            }
        }
        Real::blocks_then_singletons(blocks, ground)
    }

    fn sub_real(&self, y: &Real, rng: &mut ChaCha8Rng, ground: u64) -> Real {
        let below = y.blocks_up_to(ground.saturating_sub(1));
        let mut merged: Vec<Vec<u64>> = Vec::new();
        let mut open = false;
        for b in &below {
            match rng.gen_range(0..3) {
                0 => {}
                1 if open => merged.last_mut().expect("open block").extend(b),
                _ => {
                    merged.push(b.clone());
                    open = true;
                }
            }
        }
        let skip = below.len();
        let y = y.clone();
        Real::blocks(move |i| if i < merged.len() { merged[i].clone() } else { y.block(skip + i - merged.len()) })
    }

    fn amalgamate(&self, y: &Real, d: usize, x: &Real) -> Real {
        let head = blocks_of(&y.rn(d)).to_vec();
        let floor = head.last().and_then(|b| b.last()).map_or(0, |m| m + 1);
        let start = x.first_index_above(floor);
        let x = x.clone();
        Real::blocks(move |i| if i < head.len() { head[i].clone() } else { x.block(start + i - head.len()) })
    }
}

pub fn space_by_name(name: &str) -> Result<Arc<dyn SpaceInstance>, SpaceError> {
    match name {
        "ellentuck" => Ok(Arc::new(Ellentuck)),
        "milliken" => Ok(Arc::new(Milliken)),
        other => Err(SpaceError::UnknownSpace(other.to_string())),
    }
}

pub fn lefin(space: &dyn SpaceInstance, s: &Approx, t: &Approx) -> bool {
    space.lefin(s, t)
}

pub fn depth(space: &dyn SpaceInstance, x: &Real, s: &Approx, horizon: usize) -> Depth {
    (0..=horizon).find(|&i| space.lefin(s, &x.rn(i))).map_or(Depth::Infinity { horizon }, Depth::Finite)
}

/// `r_{|s|+1}[s, X]` restricted to elements `<= bound`, in code order.
pub fn extensions(space: &dyn SpaceInstance, s: &Approx, x: &Real, bound: u64) -> Result<Vec<Approx>, SpaceError> {
    Ok(space.extension_codes(s, x, bound)?.into_iter().map(|c| space.child(s, c).expect("valid code")).collect())
}

/// Whether `[s, X]` has an element, looking for a first extension within
/// `horizon` elements above `s`.
pub fn cube_nonempty(space: &dyn SpaceInstance, s: &Approx, x: &Real, horizon: u64) -> bool {
    (0..=horizon).any(|k| space.extension_codes(s, x, s.floor() + k).is_ok_and(|c| !c.is_empty()))
}

/// Truncated `X ≤ Y`: every `r_i(X)`, `i <= d`, is below some `r_j(Y)`,
/// `j <= horizon`.
pub fn real_le_truncated(space: &dyn SpaceInstance, x: &Real, y: &Real, d: usize, horizon: usize) -> bool {
    (0..=d).all(|i| depth(space, y, &x.rn(i), horizon).finite().is_some())
}

pub mod planted {
    //! Deliberately defective instances for exercising the checker and the
    //! error paths of the tree engine.

    use super::*;

    /// Wraps a space and drops reflexivity of `≤_fin`.
    pub struct IrreflexiveFin<S>(pub S);

    impl<S: SpaceInstance> SpaceInstance for IrreflexiveFin<S> {
        fn kind(&self) -> SpaceKind {
            self.0.kind()
        }
        fn name(&self) -> String {
            format!("{}-irreflexive", self.0.name())
        }
        fn lefin(&self, s: &Approx, t: &Approx) -> bool {
            s != t && self.0.lefin(s, t)
        }
        fn downset(&self, s: &Approx) -> Vec<Approx> {
            self.0.downset(s).into_iter().filter(|t| t != s).collect()
        }
        fn universe(&self, s: &Approx) -> PeriodicSet {
            self.0.universe(s)
        }
        fn child(&self, s: &Approx, code: u64) -> Option<Approx> {
            self.0.child(s, code)
        }
        fn code(&self, s: &Approx, t: &Approx) -> Option<u64> {
            self.0.code(s, t)
        }
        fn codes_up_to(&self, s: &Approx, bound: u64) -> Vec<u64> {
            self.0.codes_up_to(s, bound)
        }
        fn canonical_real(&self) -> Real {
            self.0.canonical_real()
        }
        fn nodes(&self, ground: u64, max_len: usize) -> Vec<Approx> {
            self.0.nodes(ground, max_len)
        }
        fn extension_codes(&self, s: &Approx, x: &Real, bound: u64) -> Result<Vec<u64>, SpaceError> {
            self.0.extension_codes(s, x, bound)
        }
        fn described_extension_codes(&self, s: &Approx, x: &Real) -> Option<PeriodicSet> {
            self.0.described_extension_codes(s, x)
        }
        fn sample_real(&self, rng: &mut ChaCha8Rng, ground: u64) -> Real {
            self.0.sample_real(rng, ground)
        }
        fn sub_real(&self, y: &Real, rng: &mut ChaCha8Rng, ground: u64) -> Real {
            self.0.sub_real(y, rng, ground)
        }
        fn amalgamate(&self, y: &Real, d: usize, x: &Real) -> Real {
            self.0.amalgamate(y, d, x)
        }
    }

    /// Ellentuck-shaped space whose nodes only extend by elements
    /// `<= cap`, so every extension set is finite.
    pub struct FiniteBranching {
        pub cap: u64,
    }

    impl SpaceInstance for FiniteBranching {
        fn kind(&self) -> SpaceKind {
            SpaceKind::Ellentuck
        }
        fn name(&self) -> String {
            format!("finite-branching-{}", self.cap)
        }
        fn lefin(&self, s: &Approx, t: &Approx) -> bool {
            Ellentuck.lefin(s, t)
        }
        fn downset(&self, s: &Approx) -> Vec<Approx> {
            Ellentuck.downset(s)
        }
        fn universe(&self, s: &Approx) -> PeriodicSet {
            PeriodicSet::finite(s.floor()..=self.cap)
        }
        fn child(&self, s: &Approx, code: u64) -> Option<Approx> {
            if code > self.cap {
                return None;
            }
            Ellentuck.child(s, code)
        }
        fn code(&self, s: &Approx, t: &Approx) -> Option<u64> {
            Ellentuck.code(s, t).filter(|&c| c <= self.cap)
        }
        fn codes_up_to(&self, s: &Approx, bound: u64) -> Vec<u64> {
            Ellentuck.codes_up_to(s, bound.min(self.cap))
        }
        fn canonical_real(&self) -> Real {
            Real::naturals()
        }
        fn nodes(&self, ground: u64, max_len: usize) -> Vec<Approx> {
            Ellentuck.nodes(ground.min(self.cap + 1), max_len)
        }
        fn extension_codes(&self, s: &Approx, x: &Real, bound: u64) -> Result<Vec<u64>, SpaceError> {
            Ellentuck.extension_codes(s, x, bound.min(self.cap))
        }
        fn described_extension_codes(&self, s: &Approx, x: &Real) -> Option<PeriodicSet> {
            Ellentuck.described_extension_codes(s, x).map(|set| set.intersect(&PeriodicSet::finite(0..=self.cap)))
        }
        fn sample_real(&self, rng: &mut ChaCha8Rng, ground: u64) -> Real {
            Ellentuck.sample_real(rng, ground)
        }
        fn sub_real(&self, y: &Real, rng: &mut ChaCha8Rng, ground: u64) -> Real {
            Ellentuck.sub_real(y, rng, ground)
        }
        fn amalgamate(&self, y: &Real, d: usize, x: &Real) -> Real {
            Ellentuck.amalgamate(y, d, x)
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Status {
    Pass,
    Fail,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AxiomEntry {
    pub axiom: String,
    pub status: Status,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub witness: Option<Value>,
    pub checks: u64,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub notes: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CheckReport {
    pub space: String,
    pub ground: u64,
    pub depth: usize,
    pub trials: usize,
    pub axioms: Vec<AxiomEntry>,
}

impl CheckReport {
    pub fn all_pass(&self) -> bool {
        self.axioms.iter().all(|a| a.status == Status::Pass)
    }

    pub fn entry(&self, axiom: &str) -> Option<&AxiomEntry> {
        self.axioms.iter().find(|a| a.axiom == axiom)
    }
}

/// Running tally for one axiom: first failure wins.
struct Tally {
    axiom: &'static str,
    checks: u64,
    witness: Option<Value>,
    notes: Vec<String>,
}

impl Tally {
    fn new(axiom: &'static str) -> Tally {
        Tally { axiom, checks: 0, witness: None, notes: Vec::new() }
    }

    fn check(&mut self, ok: bool, witness: impl FnOnce() -> Value) {
        self.checks += 1;
        if !ok && self.witness.is_none() {
            self.witness = Some(witness());
        }
    }

    fn finish(self) -> AxiomEntry {
        AxiomEntry {
            axiom: self.axiom.to_string(),
            status: if self.witness.is_none() { Status::Pass } else { Status::Fail },
            witness: self.witness,
            checks: self.checks,
            notes: self.notes,
        }
    }
}

/// Finite-scale check of the four axioms on nodes inside `{0..ground-1}`
/// of length `<= depth`, with `trials` sampled reals per property.
pub fn check_axioms(space: &dyn SpaceInstance, ground: u64, depth: usize, trials: usize) -> CheckReport {
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed_0000 ^ ground ^ ((depth as u64) << 16));
    let family = space.nodes(ground, depth);
    let horizon = (ground as usize) + depth + 2;
    let reals: Vec<Real> = std::iter::once(space.canonical_real())
        .chain((0..trials).map(|_| space.sample_real(&mut rng, ground)))
        .collect();
    let axioms = vec![
        check_sequencing(space, &family, &reals, &mut rng, ground, horizon),
        check_finitization(space, &family, &reals, &mut rng, ground, depth, horizon),
        check_amalgamation(space, &family, &reals, &mut rng, ground, horizon),
        check_pigeonhole(space, &family, &reals, &mut rng, ground, trials, horizon),
    ];
    CheckReport { space: space.name(), ground, depth, trials, axioms }
}

fn check_sequencing(
    space: &dyn SpaceInstance,
    family: &[Approx],
    reals: &[Real],
    rng: &mut ChaCha8Rng,
    ground: u64,
    horizon: usize,
) -> AxiomEntry {
    let mut t = Tally::new("A.1");
    let empty = space.empty();
    for x in reals {
        let r: Vec<Approx> = (0..=horizon).map(|i| x.rn(i)).collect();
        t.check(r[0] == empty, || json!({"part": "a", "r0": r[0]}));
        for i in 0..horizon {
            let ok = r[i].len() == i && space.is_prefix(&r[i], &r[i + 1]) && r[i] != r[i + 1];
            t.check(ok, || json!({"part": "a", "index": i, "node": r[i]}));
        }
    }
    // pairs that share long stretches of approximations
    for x in reals {
        let y = space.sub_real(x, rng, ground);
        let z = space.amalgamate(x, (ground / 2) as usize, &y);
        for other in [&y, &z] {
            let rx: Vec<Approx> = (0..=horizon).map(|i| x.rn(i)).collect();
            let ry: Vec<Approx> = (0..=horizon).map(|i| other.rn(i)).collect();
            // (b): truncations agreeing at the horizon agree everywhere below
            t.check(rx[horizon] != ry[horizon] || rx == ry, || json!({"part": "b", "x": rx[horizon]}));
            for i in 0..=horizon {
                for j in 0..=horizon {
                    if rx[i] == ry[j] {
                        let ok = i == j && (0..i).all(|k| rx[k] == ry[k]);
                        t.check(ok, || json!({"part": "c", "i": i, "j": j, "node": rx[i]}));
                    }
                }
            }
        }
    }
    for s in family {
        for i in 0..=s.len() {
            let p = s.prefix(i);
            let ok = space.is_prefix(&p, s)
                && p.len() == i
                && ((i == s.len()) == (&p == s))
                && (0..=i).all(|j| space.is_prefix(&s.prefix(j), &p));
            t.check(ok, || json!({"part": "prefix order", "node": s, "i": i}));
        }
    }
    for _ in 0..family.len().min(4096) {
        let s = &family[rng.gen_range(0..family.len())];
        let u = &family[rng.gen_range(0..family.len())];
        if space.is_prefix(s, u) {
            t.check(
                u.prefix(s.len()) == *s && (s.len() < u.len() || s == u),
                || json!({"part": "prefix order", "s": s, "t": u}),
            );
        }
    }
    t.finish()
}

fn check_finitization(
    space: &dyn SpaceInstance,
    family: &[Approx],
    reals: &[Real],
    rng: &mut ChaCha8Rng,
    ground: u64,
    depth: usize,
    horizon: usize,
) -> AxiomEntry {
    let mut t = Tally::new("A.2");
    let members: BTreeSet<&Approx> = family.iter().collect();
    for s in family {
        let down: BTreeSet<Approx> = space.downset(s).into_iter().collect();
        let brute: BTreeSet<Approx> = family
            .iter()
            .filter(|u| u.len() <= s.len() && u.floor() <= s.floor() && space.lefin(u, s))
            .cloned()
            .collect();
        t.check(down == brute, || json!({"part": "a", "node": s, "downset": down, "bruteForce": brute}));
        t.check(space.lefin(s, s), || json!({"part": "reflexive", "node": s}));
        for u in &down {
            t.check(members.contains(u) || u.len() > depth, || json!({"part": "a", "node": s, "outside": u}));
            for v in space.downset(u) {
                t.check(space.lefin(&v, s), || json!({"part": "transitive", "s": v, "t": u, "u": s}));
            }
        }
    }
    // (b), truncated: X ≤ Y gives every r_i(X) below some r_j(Y)
    for y in reals {
        let x = space.sub_real(y, rng, ground);
        for i in 0..=depth {
            let found = depth_of(space, y, &x.rn(i), horizon).is_some();
            t.check(found, || json!({"part": "b", "x": x.rn(i), "y": y.rn(horizon)}));
        }
    }
    // (c): s ⊑ t ≤_fin u gives some v ⊑ u with s ≤_fin v
    for u in family {
        for tt in space.downset(u) {
            for k in 0..=tt.len() {
                let s = tt.prefix(k);
                let ok = (0..=u.len()).any(|j| space.lefin(&s, &u.prefix(j)));
                t.check(ok, || json!({"part": "c", "s": s, "t": tt, "u": u}));
            }
        }
    }
    t.finish()
}

fn depth_of(space: &dyn SpaceInstance, x: &Real, s: &Approx, horizon: usize) -> Option<usize> {
    depth(space, x, s, horizon).finite()
}

fn check_amalgamation(
    space: &dyn SpaceInstance,
    family: &[Approx],
    reals: &[Real],
    rng: &mut ChaCha8Rng,
    ground: u64,
    horizon: usize,
) -> AxiomEntry {
    let mut t = Tally::new("A.3");
    let probe = ground + 4;
    for y in reals {
        let x_sub = space.sub_real(y, rng, ground);
        for s in family {
            let Some(d) = depth_of(space, y, s, horizon) else { continue };
            // (a): every X in [depth_Y(s), Y] has [s, X] nonempty
            let x = space.amalgamate(y, d, &x_sub);
            t.check(cube_nonempty(space, s, &x, probe), || json!({"part": "a", "s": s, "y": y.rn(d + 2)}));
            // (b): X ≤ Y with [s, X] nonempty has X' in [depth_Y(s), Y] with [s, X'] ⊆ [s, X]
            if !cube_nonempty(space, s, &x_sub, probe) {
                continue;
            }
            let x2 = space.amalgamate(y, d, &x_sub);
            let bound = s.floor() + 5;
            let ok = x2.rn(d) == y.rn(d)
                && real_le_truncated(space, &x2, y, d + 3, horizon + 4)
                && cube_nonempty(space, s, &x2, probe)
                && match (extensions(space, s, &x2, bound), extensions(space, s, &x_sub, bound)) {
                    (Ok(a), Ok(b)) => {
                        a.iter().all(|e| b.contains(e)) && two_step_inside(space, &a, &x2, &x_sub, bound + 2)
                    }
                    _ => false,
                };
            t.check(ok, || json!({"part": "b", "s": s, "x": x_sub.rn(d + 2), "y": y.rn(d + 2)}));
        }
    }
    t.finish()
}

fn two_step_inside(space: &dyn SpaceInstance, firsts: &[Approx], x2: &Real, x: &Real, bound: u64) -> bool {
    firsts.iter().take(4).all(|t| match (extensions(space, t, x2, bound), extensions(space, t, x, bound)) {
        (Ok(a), Ok(b)) => a.iter().all(|e| b.contains(e)),
        (Err(_), _) => true,
        (Ok(a), Err(_)) => a.is_empty(),
    })
}

fn check_pigeonhole(
    space: &dyn SpaceInstance,
    family: &[Approx],
    reals: &[Real],
    rng: &mut ChaCha8Rng,
    ground: u64,
    trials: usize,
    horizon: usize,
) -> AxiomEntry {
    let mut t = Tally::new("A.4");
    let mut skipped = 0u64;
    let top = ground.saturating_sub(1);
    for y in reals {
        for s in family {
            if depth_of(space, y, s, horizon).is_none() || s.floor() > top {
                continue;
            }
            let Ok(codes) = space.extension_codes(s, y, top) else { continue };
            match space.kind() {
                SpaceKind::Ellentuck => {
                    // one-point extensions: pigeonhole on the available new elements
                    let m = codes.len() as u64;
                    if m == 0 {
                        skipped += 1;
                        continue;
                    }
                    let k = m.div_ceil(2) as usize;
                    let colourings: Vec<u64> = if m <= 12 && s.is_empty() {
                        (0..1u64 << m).collect()
                    } else {
                        (0..trials.max(8)).map(|_| rng.gen_range(0..1u64 << m.min(63))).collect()
                    };
                    for bits in colourings {
                        let table = ColoringTable::from_index(1, m, 2, bits);
                        let res = finite_ramsey_search(&table, k);
                        t.check(
                            res.witness.is_some() && res.recheck,
                            || json!({"s": s, "extensions": codes, "colouring": bits}),
                        );
                    }
                }
                SpaceKind::Milliken => {
                    // new blocks are unions of the remaining blocks of Y: finite unions
                    let rest = remaining_blocks(space, s, y, top);
                    if rest < 5 {
                        skipped += 1;
                        continue;
                    }
                    let n = rest.min(10) as u32;
                    let structured: Vec<Box<dyn Fn(u64) -> u8>> = vec![
                        Box::new(|m: u64| (m.count_ones() % 2) as u8),
                        Box::new(|m: u64| (m.trailing_zeros() % 2) as u8),
                        Box::new(|m: u64| ((63 - m.leading_zeros()) % 2) as u8),
                        Box::new(|m: u64| u8::from(m.count_ones() > 2)),
                    ];
                    let mut colourings: Vec<UnionsColoring> =
                        structured.iter().map(|f| UnionsColoring::from_fn(n, 2, f)).collect();
                    for _ in 0..trials {
                        let seed: u64 = rng.gen();
                        colourings.push(UnionsColoring::from_fn(n, 2, |m| {
                            (seed.wrapping_mul(m.wrapping_mul(0x9e37_79b9_7f4a_7c15)).rotate_left(17) >> 63) as u8
                        }));
                    }
                    for c in &colourings {
                        let res = finite_unions_search(c, 2);
                        t.check(res.witness.is_some() && res.recheck, || json!({"s": s, "remainingBlocks": n}));
                    }
                }
            }
        }
    }
    if skipped > 0 {
        t.notes.push(format!("{skipped} cubes had too few extensions inside the ground and were skipped"));
    }
    t.finish()
}

fn remaining_blocks(space: &dyn SpaceInstance, s: &Approx, y: &Real, top: u64) -> usize {
    let Some(d) = depth_of(space, y, s, top as usize + 2) else { return 0 };
    y.blocks_up_to(top).len().saturating_sub(d)
}
