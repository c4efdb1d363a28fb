//! Decidable model of ideal values: eventually periodic subsets of the
//! naturals, germs of eventually quasi-linear sequences, three-valued filter
//! oracles and the diagonalizers built on top of them.
//!
//! Truth is taken modulo the Fréchet filter. A statement about an index set
//! is `True` when the set is cofinite, `False` when it is finite and
//! `Unknown` otherwise; `Unknown` marks exactly the places where a genuine
//! ultrafilter would have to choose.

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use serde::{Serialize, Serializer};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum StarError {
    #[error("invalid presentation: {0}")]
    InvalidPresentation(String),
    #[error("parse error: {0}")]
    Parse(String),
    #[error("chain is not decreasing at index {0}")]
    ChainNotDecreasing(usize),
    #[error("chain element {0} is not cofinite")]
    NotCofinite(usize),
    #[error("chain element {0} is not large for the oracle")]
    NotLarge(usize),
    #[error("chain ran dry at term {0}")]
    Exhausted(usize),
    #[error("germ is not eventually increasing on every residue class")]
    NotEventuallyIncreasing,
}

/// Kleene three-valued truth.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub enum Tri {
    True,
    False,
    Unknown,
}

impl std::ops::Not for Tri {
    type Output = Tri;

    fn not(self) -> Tri {
        match self {
            Tri::True => Tri::False,
            Tri::False => Tri::True,
            Tri::Unknown => Tri::Unknown,
        }
    }
}

impl Tri {
    pub fn from_bool(b: bool) -> Tri {
        if b {
            Tri::True
        } else {
            Tri::False
        }
    }

    pub fn and(self, other: Tri) -> Tri {
        match (self, other) {
            (Tri::False, _) | (_, Tri::False) => Tri::False,
            (Tri::True, Tri::True) => Tri::True,
            _ => Tri::Unknown,
        }
    }

    pub fn or(self, other: Tri) -> Tri {
        match (self, other) {
            (Tri::True, _) | (_, Tri::True) => Tri::True,
            (Tri::False, Tri::False) => Tri::False,
            _ => Tri::Unknown,
        }
    }

    pub fn is_true(self) -> bool {
        self == Tri::True
    }

    /// Verdict of "this index set is cofinite".
    pub fn of_index_set(set: &PeriodicSet) -> Tri {
        if set.is_cofinite() {
            Tri::True
        } else if set.is_finite() {
            Tri::False
        } else {
            Tri::Unknown
        }
    }
}

impl fmt::Display for Tri {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Tri::True => "True",
            Tri::False => "False",
            Tri::Unknown => "Unknown",
        };
        f.write_str(s)
    }
}

pub(crate) fn gcd(a: u64, b: u64) -> u64 {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

pub(crate) fn lcm(a: u64, b: u64) -> u64 {
    a / gcd(a, b) * b
}

fn prime_factors(mut n: u64) -> Vec<u64> {
    let mut out = Vec::new();
    let mut p = 2;
    while p * p <= n {
        if n.is_multiple_of(p) {
            out.push(p);
            while n.is_multiple_of(p) {
                n /= p;
            }
        }
        p += 1;
    }
    if n > 1 {
        out.push(n);
    }
    out
}

/// A subset of the naturals presented as a union of residue classes modulo
/// `modulus`, corrected by two finite exception lists.
///
/// Values are always normalized, so structural equality is set equality.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct PeriodicSet {
    modulus: u64,
    residues: Vec<u64>,
    plus: Vec<u64>,
    minus: Vec<u64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SetOp {
    Union,
    Intersect,
    Difference,
}

impl SetOp {
    fn apply(self, a: bool, b: bool) -> bool {
        match self {
            SetOp::Union => a || b,
            SetOp::Intersect => a && b,
            SetOp::Difference => a && !b,
        }
    }
}

impl PeriodicSet {
    /// Builds a set from raw fields. Exceptions may be redundant but must be
    /// disjoint; the result is normalized.
    pub fn new(modulus: u64, residues: &[u64], plus: &[u64], minus: &[u64]) -> Result<PeriodicSet, StarError> {
        if modulus == 0 {
            return Err(StarError::InvalidPresentation("modulus must be positive".into()));
        }
        if let Some(r) = residues.iter().find(|&&r| r >= modulus) {
            return Err(StarError::InvalidPresentation(format!("residue {r} is not below modulus {modulus}")));
        }
        let plus_set: BTreeSet<u64> = plus.iter().copied().collect();
        if let Some(x) = minus.iter().find(|x| plus_set.contains(x)) {
            return Err(StarError::InvalidPresentation(format!("{x} is listed as both added and removed")));
        }
        let minus_set: BTreeSet<u64> = minus.iter().copied().collect();
        let mut flags = vec![false; modulus as usize];
        for &r in residues {
            flags[r as usize] = true;
        }
        let periodic = flags.clone();
        Ok(Self::build(modulus, flags, plus_set.iter().chain(minus_set.iter()).copied(), |n| {
            if plus_set.contains(&n) {
                true
            } else if minus_set.contains(&n) {
                false
            } else {
                periodic[(n % modulus) as usize]
            }
        }))
    }

    /// Normalizing constructor: `flags` is the eventual pattern modulo
    /// `modulus`, `member` the true membership, and every point where the two
    /// may disagree is among `candidates`.
    pub(crate) fn build(
        modulus: u64,
        flags: Vec<bool>,
        candidates: impl IntoIterator<Item = u64>,
        member: impl Fn(u64) -> bool,
    ) -> PeriodicSet {
        let mut m = modulus;
        let mut flags = flags;
        for q in prime_factors(modulus) {
            while m.is_multiple_of(q) {
                let d = m / q;
                if (0..m as usize).all(|i| flags[i] == flags[i % d as usize]) {
                    flags.truncate(d as usize);
                    m = d;
                } else {
                    break;
                }
            }
        }
        let residues: Vec<u64> = (0..m).filter(|&r| flags[r as usize]).collect();
        let cands: BTreeSet<u64> = candidates.into_iter().collect();
        let mut plus = Vec::new();
        let mut minus = Vec::new();
        for n in cands {
            let periodic = flags[(n % m) as usize];
            let actual = member(n);
            if actual && !periodic {
                plus.push(n);
            } else if !actual && periodic {
                minus.push(n);
            }
        }
        PeriodicSet { modulus: m, residues, plus, minus }
    }

    pub fn all() -> PeriodicSet {
        PeriodicSet { modulus: 1, residues: vec![0], plus: vec![], minus: vec![] }
    }

    pub fn empty() -> PeriodicSet {
        PeriodicSet { modulus: 1, residues: vec![], plus: vec![], minus: vec![] }
    }

    pub fn finite(elements: impl IntoIterator<Item = u64>) -> PeriodicSet {
        let mut plus: Vec<u64> = elements.into_iter().collect();
        plus.sort_unstable();
        plus.dedup();
        PeriodicSet { modulus: 1, residues: vec![], plus, minus: vec![] }
    }

    pub fn residue_class(modulus: u64, residue: u64) -> PeriodicSet {
        assert!(modulus > 0, "modulus must be positive");
        PeriodicSet::new(modulus, &[residue % modulus], &[], &[]).expect("valid residue class")
    }

    pub fn multiples(k: u64) -> PeriodicSet {
        PeriodicSet::residue_class(k, 0)
    }

    pub fn evens() -> PeriodicSet {
        PeriodicSet::multiples(2)
    }

    /// `{x : x >= k}`.
    pub fn tail(k: u64) -> PeriodicSet {
        PeriodicSet { modulus: 1, residues: vec![0], plus: vec![], minus: (0..k).collect() }
    }

    pub fn modulus(&self) -> u64 {
        self.modulus
    }

    pub fn residues(&self) -> &[u64] {
        &self.residues
    }

    pub fn plus_exceptions(&self) -> &[u64] {
        &self.plus
    }

    pub fn minus_exceptions(&self) -> &[u64] {
        &self.minus
    }

    fn periodic(&self, n: u64) -> bool {
        self.residues.binary_search(&(n % self.modulus)).is_ok()
    }

    pub fn contains(&self, n: u64) -> bool {
        if self.plus.binary_search(&n).is_ok() {
            return true;
        }
        if self.minus.binary_search(&n).is_ok() {
            return false;
        }
        self.periodic(n)
    }

    pub fn is_cofinite(&self) -> bool {
        self.residues.len() as u64 == self.modulus
    }

    pub fn is_finite(&self) -> bool {
        self.residues.is_empty()
    }

    pub fn is_infinite(&self) -> bool {
        !self.is_finite()
    }

    pub fn is_empty(&self) -> bool {
        self.residues.is_empty() && self.plus.is_empty()
    }

    /// Largest exceptional point, if any.
    pub fn max_exception(&self) -> Option<u64> {
        self.plus.last().copied().max(self.minus.last().copied())
    }

    pub fn combine(op: SetOp, a: &PeriodicSet, b: &PeriodicSet) -> PeriodicSet {
        let m = lcm(a.modulus, b.modulus);
        let flags: Vec<bool> = (0..m).map(|r| op.apply(a.periodic(r), b.periodic(r))).collect();
        let cands = a.plus.iter().chain(&a.minus).chain(&b.plus).chain(&b.minus).copied();
        PeriodicSet::build(m, flags, cands, |n| op.apply(a.contains(n), b.contains(n)))
    }

    pub fn union(&self, other: &PeriodicSet) -> PeriodicSet {
        PeriodicSet::combine(SetOp::Union, self, other)
    }

    pub fn intersect(&self, other: &PeriodicSet) -> PeriodicSet {
        PeriodicSet::combine(SetOp::Intersect, self, other)
    }

    pub fn difference(&self, other: &PeriodicSet) -> PeriodicSet {
        PeriodicSet::combine(SetOp::Difference, self, other)
    }

    pub fn complement(&self) -> PeriodicSet {
        PeriodicSet::all().difference(self)
    }

    pub fn is_subset(&self, other: &PeriodicSet) -> bool {
        self.difference(other).is_empty()
    }

    /// Least member `>= from`.
    pub fn next_member(&self, from: u64) -> Option<u64> {
        let from_plus = self.plus.iter().copied().find(|&x| x >= from);
        let mut periodic_hit = None;
        if !self.residues.is_empty() {
            let mut x = from;
            loop {
                let r = x % self.modulus;
                let base = x - r;
                let next = match self.residues.iter().find(|&&q| q >= r) {
                    Some(&q) => base + q,
                    None => base + self.modulus + self.residues[0],
                };
                if self.minus.binary_search(&next).is_ok() {
                    x = next + 1;
                } else {
                    periodic_hit = Some(next);
                    break;
                }
            }
        }
        match (from_plus, periodic_hit) {
            (Some(a), Some(b)) => Some(a.min(b)),
            (a, b) => a.or(b),
        }
    }

    /// Ascending members starting at `from`.
    pub fn iter_from(&self, from: u64) -> impl Iterator<Item = u64> + '_ {
        let mut next = self.next_member(from);
        std::iter::from_fn(move || {
            let cur = next?;
            next = cur.checked_add(1).and_then(|n| self.next_member(n));
            Some(cur)
        })
    }

    /// Members `<= bound`, ascending.
    pub fn members_up_to(&self, bound: u64) -> Vec<u64> {
        self.iter_from(0).take_while(|&x| x <= bound).collect()
    }
}

fn parse_list(s: &str) -> Result<Vec<u64>, StarError> {
    let s = s.trim();
    let inner = s
        .strip_prefix('[')
        .and_then(|t| t.strip_suffix(']'))
        .ok_or_else(|| StarError::Parse(format!("expected a bracketed list, got `{s}`")))?;
    inner
        .split(',')
        .map(str::trim)
        .filter(|t| !t.is_empty())
        .map(|t| t.parse::<u64>().map_err(|_| StarError::Parse(format!("bad integer `{t}`"))))
        .collect()
}

fn fmt_list(xs: &[u64]) -> String {
    let parts: Vec<String> = xs.iter().map(u64::to_string).collect();
    format!("[{}]", parts.join(","))
}

impl fmt::Display for PeriodicSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "mod={}; res={}; plus={}; minus={}",
            self.modulus,
            fmt_list(&self.residues),
            fmt_list(&self.plus),
            fmt_list(&self.minus)
        )
    }
}

impl FromStr for PeriodicSet {
    type Err = StarError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let mut modulus = None;
        let mut res = None;
        let mut plus = Vec::new();
        let mut minus = Vec::new();
        for part in s.split(';').map(str::trim).filter(|p| !p.is_empty()) {
            let (key, value) =
                part.split_once('=').ok_or_else(|| StarError::Parse(format!("expected key=value, got `{part}`")))?;
            match key.trim() {
                "mod" => {
                    modulus = Some(
                        value
                            .trim()
                            .parse::<u64>()
                            .map_err(|_| StarError::Parse(format!("bad modulus `{}`", value.trim())))?,
                    )
                }
                "res" => res = Some(parse_list(value)?),
                "plus" => plus = parse_list(value)?,
                "minus" => minus = parse_list(value)?,
                other => return Err(StarError::Parse(format!("unknown key `{other}`"))),
            }
        }
        let modulus = modulus.ok_or_else(|| StarError::Parse("missing mod=".into()))?;
        let res = res.ok_or_else(|| StarError::Parse("missing res=".into()))?;
        PeriodicSet::new(modulus, &res, &plus, &minus)
    }
}

impl Serialize for PeriodicSet {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_str(&self.to_string())
    }
}

fn floor_div(a: i128, b: i128) -> i128 {
    let q = a / b;
    if (a % b != 0) && ((a < 0) != (b < 0)) {
        q - 1
    } else {
        q
    }
}

/// Presentation `φ_i = base[i mod p] + drift[i mod p]·⌊(i−N)/p⌋` for `i >= N`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct QuasiLinear {
    period: u64,
    base: Vec<u64>,
    drift: Vec<u64>,
    onset: u64,
}

impl QuasiLinear {
    pub fn period(&self) -> u64 {
        self.period
    }

    pub fn base(&self) -> &[u64] {
        &self.base
    }

    pub fn drift(&self) -> &[u64] {
        &self.drift
    }

    pub fn onset(&self) -> u64 {
        self.onset
    }

    /// The formula extended to every integer index; may go negative below
    /// the onset.
    fn ext(&self, i: i128) -> i128 {
        let p = self.period as i128;
        let c = i.rem_euclid(p) as usize;
        self.base[c] as i128 + self.drift[c] as i128 * floor_div(i - self.onset as i128, p)
    }

    fn rebuild(period: u64, onset: u64, ext: impl Fn(i128) -> i128) -> (Vec<u64>, Vec<u64>) {
        let p = period as i128;
        let mut base = vec![0; period as usize];
        let mut drift = vec![0; period as usize];
        for k in 0..p {
            let i = onset as i128 + k;
            let c = i.rem_euclid(p) as usize;
            base[c] = ext(i) as u64;
            drift[c] = (ext(i + p) - ext(i)) as u64;
        }
        (base, drift)
    }
}

/// Germ of a sequence of naturals modulo cofinite agreement.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Germ {
    Standard(u64),
    QuasiLinear(QuasiLinear),
}

impl Germ {
    /// Canonicalizing constructor.
    pub fn quasi_linear(period: u64, base: Vec<u64>, drift: Vec<u64>, onset: u64) -> Result<Germ, StarError> {
        if period == 0 {
            return Err(StarError::InvalidPresentation("period must be positive".into()));
        }
        if base.len() as u64 != period || drift.len() as u64 != period {
            return Err(StarError::InvalidPresentation(format!(
                "period {period} needs {period} base and drift entries"
            )));
        }
        Ok(Germ::canonical(QuasiLinear { period, base, drift, onset }))
    }

    fn canonical(q: QuasiLinear) -> Germ {
        let mut q = q;
        // Shrink the period: the pair (slope, offset) per class is periodic
        // in every period of the sequence, so the minimal period divides p.
        for prime in prime_factors(q.period) {
            while q.period.is_multiple_of(prime) {
                let p = q.period as i128;
                let d = p / prime as i128;
                let n = q.onset as i128;
                let ok = (0..p as usize).all(|c| q.drift[c] == q.drift[(c + d as usize) % p as usize])
                    && (n..n + p).all(|i| q.ext(i + d) - q.ext(i) == q.ext(i + 2 * d) - q.ext(i + d));
                if !ok {
                    break;
                }
                let (base, drift) = QuasiLinear::rebuild(d as u64, q.onset, |i| q.ext(i));
                q = QuasiLinear { period: d as u64, base, drift, onset: q.onset };
            }
        }
        // Pull the onset back while every value stays a natural number.
        let p = q.period as i128;
        let mut onset: i128 = 0;
        for c in 0..p {
            let v = q.ext(c);
            let d = q.drift[c as usize] as i128;
            let first = if v >= 0 {
                c
            } else {
                let k = (-v + d - 1) / d;
                c + k * p
            };
            onset = onset.max(first - p + 1);
        }
        let onset = onset.max(0) as u64;
        let (base, drift) = QuasiLinear::rebuild(q.period, onset, |i| q.ext(i));
        if q.period == 1 && drift[0] == 0 {
            return Germ::Standard(base[0]);
        }
        Germ::QuasiLinear(QuasiLinear { period: q.period, base, drift, onset })
    }

    /// The distinguished germ of `i ↦ i`.
    pub fn identity() -> Germ {
        Germ::affine(1, 0)
    }

    /// Germ of `i ↦ a·i + b`.
    pub fn affine(a: u64, b: u64) -> Germ {
        Germ::quasi_linear(1, vec![b], vec![a], 0).expect("period one presentation")
    }

    /// Germ of the purely periodic sequence `values[i mod len]`.
    pub fn periodic(values: &[u64]) -> Result<Germ, StarError> {
        Germ::quasi_linear(values.len() as u64, values.to_vec(), vec![0; values.len()], 0)
    }

    pub(crate) fn view(&self) -> QuasiLinear {
        match self {
            Germ::Standard(v) => QuasiLinear { period: 1, base: vec![*v], drift: vec![0], onset: 0 },
            Germ::QuasiLinear(q) => q.clone(),
        }
    }

    pub fn onset(&self) -> u64 {
        match self {
            Germ::Standard(_) => 0,
            Germ::QuasiLinear(q) => q.onset,
        }
    }

    pub fn period(&self) -> u64 {
        match self {
            Germ::Standard(_) => 1,
            Germ::QuasiLinear(q) => q.period,
        }
    }

    /// Value of the representative at `i`; `None` below the onset.
    pub fn value(&self, i: u64) -> Option<u64> {
        match self {
            Germ::Standard(v) => Some(*v),
            Germ::QuasiLinear(q) => {
                if i < q.onset {
                    None
                } else {
                    Some(q.ext(i as i128) as u64)
                }
            }
        }
    }

    /// All drifts positive: no constant is hit infinitely often.
    pub fn is_nonstandard(&self) -> bool {
        match self {
            Germ::Standard(_) => false,
            Germ::QuasiLinear(q) => q.drift.iter().all(|&d| d > 0),
        }
    }

    pub fn is_standard(&self) -> bool {
        matches!(self, Germ::Standard(_))
    }
}

impl fmt::Display for Germ {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Germ::Standard(v) => write!(f, "std:{v}"),
            Germ::QuasiLinear(q) => {
                write!(f, "ql:p={};base={};drift={};onset={}", q.period, fmt_list(&q.base), fmt_list(&q.drift), q.onset)
            }
        }
    }
}

impl FromStr for Germ {
    type Err = StarError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim();
        if let Some(v) = s.strip_prefix("std:") {
            return v
                .trim()
                .parse::<u64>()
                .map(Germ::Standard)
                .map_err(|_| StarError::Parse(format!("bad standard value `{v}`")));
        }
        let body = s
            .strip_prefix("ql:")
            .ok_or_else(|| StarError::Parse(format!("germ must start with std: or ql:, got `{s}`")))?;
        let mut period = None;
        let mut base = None;
        let mut drift = None;
        let mut onset = 0;
        for part in body.split(';').map(str::trim).filter(|p| !p.is_empty()) {
            let (key, value) =
                part.split_once('=').ok_or_else(|| StarError::Parse(format!("expected key=value, got `{part}`")))?;
            let num = |v: &str| v.trim().parse::<u64>().map_err(|_| StarError::Parse(format!("bad integer `{v}`")));
            match key.trim() {
                "p" => period = Some(num(value)?),
                "base" => base = Some(parse_list(value)?),
                "drift" => drift = Some(parse_list(value)?),
                "onset" => onset = num(value)?,
                other => return Err(StarError::Parse(format!("unknown key `{other}`"))),
            }
        }
        Germ::quasi_linear(
            period.ok_or_else(|| StarError::Parse("missing p=".into()))?,
            base.ok_or_else(|| StarError::Parse("missing base=".into()))?,
            drift.ok_or_else(|| StarError::Parse("missing drift=".into()))?,
            onset,
        )
    }
}

impl Serialize for Germ {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_str(&self.to_string())
    }
}

/// A three-valued verdict together with the index set it was read from.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Judgement {
    pub value: Tri,
    pub index_set: PeriodicSet,
}

impl Judgement {
    fn of(index_set: PeriodicSet) -> Judgement {
        Judgement { value: Tri::of_index_set(&index_set), index_set }
    }
}

/// Agreement set of two germs, counted from the later onset.
pub fn germ_eq_witness(phi: &Germ, psi: &Germ) -> Judgement {
    let a = phi.view();
    let b = psi.view();
    let l = lcm(a.period, b.period);
    let start = a.onset.max(b.onset);
    let mut flags = vec![false; l as usize];
    let mut points = Vec::new();
    for c in 0..l {
        let i = start + (c + l - start % l) % l;
        let (a0, a1) = (a.ext(i as i128), a.ext((i + l) as i128));
        let (b0, b1) = (b.ext(i as i128), b.ext((i + l) as i128));
        let (da, db) = (a1 - a0, b1 - b0);
        if da == db {
            if a0 == b0 {
                flags[c as usize] = true;
            }
        } else {
            let num = b0 - a0;
            let den = da - db;
            if num % den == 0 && num / den >= 0 {
                points.push(i + (num / den) as u64 * l);
            }
        }
    }
    let pattern = flags.clone();
    let set = PeriodicSet::build(l, flags, (0..start).chain(points.iter().copied()), |i| {
        (i >= start && pattern[(i % l) as usize]) || points.contains(&i)
    });
    Judgement::of(set)
}

pub fn germ_eq(phi: &Germ, psi: &Germ) -> Tri {
    germ_eq_witness(phi, psi).value
}

/// Germ of `i ↦ u·φ_i + v`.
pub fn germ_apply_affine(u: u64, v: u64, phi: &Germ) -> Germ {
    match phi {
        Germ::Standard(c) => Germ::Standard(u * c + v),
        Germ::QuasiLinear(q) => {
            let base = q.base.iter().map(|b| u * b + v).collect();
            let drift = q.drift.iter().map(|d| u * d).collect();
            Germ::quasi_linear(q.period, base, drift, q.onset).expect("same shape")
        }
    }
}

/// Index set `{i : φ_i ∈ X}`.
pub fn germ_member_witness(phi: &Germ, x: &PeriodicSet) -> Judgement {
    let q = phi.view();
    let m = q.period * x.modulus();
    let horizon = q.onset + q.period * (x.max_exception().unwrap_or(0) + 1);
    let flags: Vec<bool> = (0..m)
        .map(|r| {
            let i = horizon + (r + m - horizon % m) % m;
            x.contains(q.ext(i as i128) as u64)
        })
        .collect();
    let set = PeriodicSet::build(m, flags, 0..horizon, |i| i >= q.onset && x.contains(q.ext(i as i128) as u64));
    Judgement::of(set)
}

pub fn germ_member(phi: &Germ, x: &PeriodicSet) -> Tri {
    germ_member_witness(phi, x).value
}

/// Property check: a nonstandard germ can only lie in infinite sets.
pub fn assert_infinite_if_member(phi: &Germ, x: &PeriodicSet) -> bool {
    germ_member(phi, x) != Tri::True || x.is_infinite()
}

/// A decreasing chain of periodic sets, either listed or generated.
#[derive(Clone)]
pub enum Chain {
    Finite(Vec<PeriodicSet>),
    Lazy { generator: Arc<dyn Fn(usize) -> PeriodicSet + Send + Sync>, horizon: usize },
}

impl fmt::Debug for Chain {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Chain::Finite(sets) => f.debug_tuple("Finite").field(sets).finish(),
            Chain::Lazy { horizon, .. } => f.debug_struct("Lazy").field("horizon", horizon).finish(),
        }
    }
}

impl Chain {
    pub fn lazy(horizon: usize, generator: impl Fn(usize) -> PeriodicSet + Send + Sync + 'static) -> Chain {
        Chain::Lazy { generator: Arc::new(generator), horizon }
    }

    /// Elements actually supplied: the whole list, or the generated prefix.
    pub fn supplied(&self) -> Vec<PeriodicSet> {
        match self {
            Chain::Finite(sets) => sets.clone(),
            Chain::Lazy { generator, horizon } => (0..*horizon).map(|i| generator(i)).collect(),
        }
    }

    /// `X_i`, holding the last listed set constant past the end.
    pub fn get(&self, i: usize) -> Option<PeriodicSet> {
        match self {
            Chain::Finite(sets) => sets.get(i).or(sets.last()).cloned(),
            Chain::Lazy { generator, .. } => Some(generator(i)),
        }
    }
}

fn check_decreasing(sets: &[PeriodicSet]) -> Result<(), StarError> {
    for i in 1..sets.len() {
        if !sets[i].is_subset(&sets[i - 1]) {
            return Err(StarError::ChainNotDecreasing(i));
        }
    }
    Ok(())
}

/// Diagonal of a chain of cofinite sets that is only known through a finite
/// prefix of the chain. Answers membership queries soundly.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct StreamGerm {
    sets: Vec<PeriodicSet>,
    prefix: Vec<u64>,
}

impl StreamGerm {
    /// `True` when `X` contains a supplied chain member, `False` when it
    /// meets one only finitely, `Unknown` otherwise.
    pub fn member(&self, x: &PeriodicSet) -> Tri {
        if self.sets.iter().any(|s| s.is_subset(x)) {
            Tri::True
        } else if self.sets.iter().any(|s| s.intersect(x).is_finite()) {
            Tri::False
        } else {
            Tri::Unknown
        }
    }

    pub fn prefix(&self) -> &[u64] {
        &self.prefix
    }
}

/// Result of [`chain_witness`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ChainGerm {
    Presented(Germ),
    Stream(StreamGerm),
}

impl ChainGerm {
    pub fn member(&self, x: &PeriodicSet) -> Tri {
        match self {
            ChainGerm::Presented(g) => germ_member(g, x),
            ChainGerm::Stream(s) => s.member(x),
        }
    }

    /// First `n` values of the representative, where defined.
    pub fn values(&self, n: usize) -> Vec<u64> {
        match self {
            ChainGerm::Presented(g) => (0..).filter_map(|i| g.value(i)).take(n).collect(),
            ChainGerm::Stream(s) => s.prefix.iter().copied().take(n).collect(),
        }
    }

    pub fn as_oracle(&self) -> FilterOracle {
        match self {
            ChainGerm::Presented(g) => FilterOracle::GermFilter(g.clone()),
            ChainGerm::Stream(s) => FilterOracle::StreamFilter(s.clone()),
        }
    }
}

fn diagonal(sets: &[PeriodicSet], terms: usize, get: impl Fn(usize) -> PeriodicSet) -> Vec<u64> {
    let mut out: Vec<u64> = Vec::with_capacity(terms);
    for i in 0..terms {
        let set = if i < sets.len() { sets[i].clone() } else { get(i) };
        let from = out.last().map_or(0, |&x| x + 1);
        out.push(set.next_member(from).expect("cofinite set has members above any bound"));
    }
    out
}

fn fit_quasi_linear(values: &[u64], start: usize) -> Option<Germ> {
    for p in 1..=4usize {
        if start + 2 * p > values.len() {
            break;
        }
        let base: Vec<u64> = values[start..start + p].to_vec();
        let mut drift = Vec::with_capacity(p);
        for c in 0..p {
            let (a, b) = (values[start + c], values[start + c + p]);
            if b < a {
                drift.clear();
                break;
            }
            drift.push(b - a);
        }
        if drift.len() != p {
            continue;
        }
        let mut ordered_base = vec![0; p];
        let mut ordered_drift = vec![0; p];
        for k in 0..p {
            let c = (start + k) % p;
            ordered_base[c] = base[k];
            ordered_drift[c] = drift[k];
        }
        let germ = Germ::quasi_linear(p as u64, ordered_base, ordered_drift, start as u64).ok()?;
        if (start..values.len()).all(|i| germ.value(i as u64) == Some(values[i])) {
            return Some(germ);
        }
    }
    None
}

/// A germ lying in every member of a decreasing chain of cofinite sets,
/// read off the diagonal `ψ_i = min{x ∈ X_i : x > ψ_{i−1}}`.
pub fn chain_witness(chain: &Chain) -> Result<ChainGerm, StarError> {
    let sets = chain.supplied();
    if let Some(i) = sets.iter().position(|s| !s.is_cofinite()) {
        return Err(StarError::NotCofinite(i));
    }
    check_decreasing(&sets)?;
    match chain {
        Chain::Finite(_) => {
            let Some(last) = sets.last() else {
                return Ok(ChainGerm::Presented(Germ::identity()));
            };
            let floor = last.max_exception().unwrap_or(0);
            let mut values = diagonal(&sets, sets.len(), |_| last.clone());
            while values.last().is_none_or(|&v| v <= floor) {
                let next = last.next_member(values.last().map_or(0, |&v| v + 1)).expect("cofinite");
                values.push(next);
            }
            let j = values.len() - 1;
            let germ = Germ::quasi_linear(1, vec![values[j]], vec![1], j as u64)?;
            Ok(ChainGerm::Presented(germ))
        }
        Chain::Lazy { generator, horizon } => {
            let values = diagonal(&sets, *horizon, |i| generator(i));
            let fitted =
                fit_quasi_linear(&values, horizon / 2).filter(|g| sets.iter().all(|s| germ_member(g, s) == Tri::True));
            Ok(match fitted {
                Some(g) => ChainGerm::Presented(g),
                None => ChainGerm::Stream(StreamGerm { sets, prefix: values }),
            })
        }
    }
}

/// Greedy diagonal `x_0 < x_1 < …` with `x_n = min{x ∈ X_n : x > x_{n−1}}`,
/// so in particular `x_{n+1} ∈ X_n`. Returns the first `terms` values.
pub fn scip_diagonalize(chain: &Chain, largeness: &FilterOracle, terms: usize) -> Result<Vec<u64>, StarError> {
    let mut out: Vec<u64> = Vec::with_capacity(terms);
    let mut prev: Option<PeriodicSet> = None;
    for n in 0..terms {
        let set = chain.get(n).ok_or(StarError::Exhausted(n))?;
        if largeness.large(&set) != Tri::True {
            return Err(StarError::NotLarge(n));
        }
        if let Some(p) = &prev {
            if !set.is_subset(p) {
                return Err(StarError::ChainNotDecreasing(n));
            }
        }
        let from = out.last().map_or(0, |&x| x + 1);
        let x = set.next_member(from).ok_or(StarError::Exhausted(n))?;
        out.push(x);
        prev = Some(set);
    }
    Ok(out)
}

/// Plateau reparameterization: anchors are the record indices of `φ` and
/// the witness repeats the last record value until the next one.
///
/// The witness is nondecreasing and strictly increasing along its anchors.
/// It agrees with `φ` on the anchors, so `germ_eq(φ, ψ)` is `True` exactly
/// when `φ` is eventually nondecreasing; otherwise the agreement set is
/// infinite and coinfinite and the verdict is `Unknown`.
pub fn scip_witness(phi: &Germ) -> Result<Germ, StarError> {
    if !phi.is_nonstandard() {
        return Err(StarError::NotEventuallyIncreasing);
    }
    let q = phi.view();
    let p = q.period as i128;
    // value(i) = (drift·i + e_c)/p on class c
    let e: Vec<i128> = (0..p).map(|c| p * q.ext(c) - q.drift[c as usize] as i128 * c).collect();
    let dmax = *q.drift.iter().max().expect("nonempty") as i128;
    let top_e = e
        .iter()
        .zip(&q.drift)
        .filter(|(_, &d)| d as i128 == dmax)
        .map(|(&e, _)| e)
        .min()
        .expect("some class attains the top drift");
    let max_e = *e.iter().max().expect("nonempty");
    let settle = (max_e - top_e + dmax * p + p).max(0) as u64;
    let stable = q.onset + settle + q.period;
    let end = stable + 3 * q.period;
    let mut plateau = Vec::with_capacity(end as usize);
    let mut best: Option<u64> = None;
    for i in q.onset..end {
        let v = q.ext(i as i128) as u64;
        if best.is_none_or(|b| v > b) {
            best = Some(v);
        }
        plateau.push(best.expect("set above"));
    }
    let at = |i: u64| plateau[(i - q.onset) as usize];
    let start = stable + q.period;
    let mut base = vec![0; q.period as usize];
    let mut drift = vec![0; q.period as usize];
    for k in 0..q.period {
        let i = start + k;
        let c = (i % q.period) as usize;
        base[c] = at(i);
        drift[c] = at(i + q.period) - at(i);
    }
    Germ::quasi_linear(q.period, base, drift, start)
}

/// Three-valued largeness test on periodic sets.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum FilterOracle {
    /// Membership in the filter of cofinite sets: `True` iff cofinite.
    Frechet,
    Principal(u64),
    GermFilter(Germ),
    StreamFilter(StreamGerm),
}

impl FilterOracle {
    pub fn large(&self, x: &PeriodicSet) -> Tri {
        match self {
            FilterOracle::Frechet => Tri::from_bool(x.is_cofinite()),
            FilterOracle::Principal(n) => Tri::from_bool(x.contains(*n)),
            FilterOracle::GermFilter(g) => germ_member(g, x),
            FilterOracle::StreamFilter(s) => s.member(x),
        }
    }

    /// Short text form: `frechet`, `principal:N`, `germ:<germ>` or `stream`.
    pub fn describe(&self) -> String {
        match self {
            FilterOracle::Frechet => "frechet".into(),
            FilterOracle::Principal(n) => format!("principal:{n}"),
            FilterOracle::GermFilter(g) => format!("germ:{g}"),
            FilterOracle::StreamFilter(_) => "stream".into(),
        }
    }
}

impl FromStr for FilterOracle {
    type Err = StarError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim();
        if s == "frechet" {
            Ok(FilterOracle::Frechet)
        } else if let Some(n) = s.strip_prefix("principal:") {
            n.trim()
                .parse()
                .map(FilterOracle::Principal)
                .map_err(|_| StarError::Parse(format!("bad principal point `{n}`")))
        } else if let Some(g) = s.strip_prefix("germ:") {
            Ok(FilterOracle::GermFilter(g.parse()?))
        } else {
            Err(StarError::Parse(format!("unknown filter `{s}`")))
        }
    }
}

impl Serialize for FilterOracle {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_str(&self.describe())
    }
}
