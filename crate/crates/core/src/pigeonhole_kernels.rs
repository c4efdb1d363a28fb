//! Exhaustive finite searches: homogeneous sets for colourings of n-subsets,
//! monochromatic finite-unions block sequences, and the minimal ground sizes
//! at which such witnesses are forced.

use std::collections::HashMap;
use std::io::Read;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum KernelError {
    #[error("no value up to {0}")]
    NotFound(usize),
    #[error("malformed colouring: {0}")]
    Malformed(String),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("audit enumeration of {0} colourings is beyond desk scale")]
    AuditTooLarge(u128),
}

pub fn binomial(n: u64, k: u64) -> u64 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut acc: u64 = 1;
    for i in 0..k {
        acc = acc * (n - i) / (i + 1);
    }
    acc
}

/// Colex rank of a sorted subset.
pub fn colex_rank(subset: &[u64]) -> usize {
    subset.iter().enumerate().map(|(i, &c)| binomial(c, i as u64 + 1) as usize).sum()
}

/// All `k`-subsets of `{0..n-1}` in lexicographic order.
pub fn k_subsets(n: u64, k: usize) -> Vec<Vec<u64>> {
    let mut out = Vec::new();
    let mut cur = Vec::with_capacity(k);
    fn go(start: u64, n: u64, k: usize, cur: &mut Vec<u64>, out: &mut Vec<Vec<u64>>) {
        if cur.len() == k {
            out.push(cur.clone());
            return;
        }
        let need = (k - cur.len()) as u64;
        let mut x = start;
        while x + need <= n {
            cur.push(x);
            go(x + 1, n, k, cur, out);
            cur.pop();
            x += 1;
        }
    }
    go(0, n, k, &mut cur, &mut out);
    out
}

/// A colouring of the `arity`-subsets of `{0..ground-1}`, indexed by colex rank.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ColoringTable {
    arity: usize,
    ground: u64,
    colors: u8,
    table: Vec<u8>,
}

#[derive(Debug, Deserialize)]
struct JsonEntry {
    node: Vec<u64>,
    color: u8,
}

#[derive(Debug, Deserialize)]
struct JsonColoring {
    arity: Option<usize>,
    ground: Option<u64>,
    colors: Option<u8>,
    entries: Vec<JsonEntry>,
}

impl ColoringTable {
    pub fn from_fn(arity: usize, ground: u64, colors: u8, f: impl Fn(&[u64]) -> u8) -> ColoringTable {
        let size = binomial(ground, arity as u64) as usize;
        let mut table = vec![0; size];
        for s in k_subsets(ground, arity) {
            let c = f(&s);
            assert!(c < colors, "colour {c} out of range");
            table[colex_rank(&s)] = c;
        }
        ColoringTable { arity, ground, colors, table }
    }

    /// Colouring whose table is the base-`colors` digits of `index`; used to
    /// enumerate every colouring.
    pub fn from_index(arity: usize, ground: u64, colors: u8, mut index: u64) -> ColoringTable {
        let size = binomial(ground, arity as u64) as usize;
        let mut table = vec![0; size];
        for slot in table.iter_mut() {
            *slot = (index % colors as u64) as u8;
            index /= colors as u64;
        }
        ColoringTable { arity, ground, colors, table }
    }

    pub fn from_entries(
        arity: Option<usize>,
        ground: Option<u64>,
        colors: Option<u8>,
        entries: &[(Vec<u64>, u8)],
    ) -> Result<ColoringTable, KernelError> {
        let first = entries.first().ok_or_else(|| KernelError::Malformed("no entries".into()))?;
        let arity = arity.unwrap_or(first.0.len());
        let max_el = entries.iter().flat_map(|(n, _)| n.iter()).max().copied().unwrap_or(0);
        let ground = ground.unwrap_or(max_el + 1);
        let max_color = entries.iter().map(|e| e.1).max().unwrap_or(0);
        let colors = colors.unwrap_or((max_color + 1).max(2));
        if colors < 2 {
            return Err(KernelError::Malformed("at least two colours are required".into()));
        }
        let size = binomial(ground, arity as u64) as usize;
        let mut table: Vec<Option<u8>> = vec![None; size];
        for (node, color) in entries {
            let mut node = node.clone();
            node.sort_unstable();
            node.dedup();
            if node.len() != arity {
                return Err(KernelError::Malformed(format!("node {node:?} is not a {arity}-subset")));
            }
            if node.iter().any(|&x| x >= ground) {
                return Err(KernelError::Malformed(format!("node {node:?} leaves the ground {ground}")));
            }
            if *color >= colors {
                return Err(KernelError::Malformed(format!("colour {color} not below {colors}")));
            }
            let slot = &mut table[colex_rank(&node)];
            if slot.is_some_and(|c| c != *color) {
                return Err(KernelError::Malformed(format!("node {node:?} coloured twice")));
            }
            *slot = Some(*color);
        }
        let table = table
            .into_iter()
            .enumerate()
            .map(|(i, c)| c.ok_or_else(|| KernelError::Malformed(format!("node with colex rank {i} uncoloured"))))
            .collect::<Result<Vec<u8>, _>>()?;
        Ok(ColoringTable { arity, ground, colors, table })
    }

    /// Rows `node,color`. The node is either spread over all leading fields
    /// or packed into one field as `0 1`, `[0 1]` or `0;1`. A non-numeric
    /// first row is a header.
    pub fn from_csv(reader: impl Read, ground: Option<u64>) -> Result<ColoringTable, KernelError> {
        let mut rdr =
            csv::ReaderBuilder::new().has_headers(false).flexible(true).trim(csv::Trim::All).from_reader(reader);
        let mut entries = Vec::new();
        for (row, record) in rdr.records().enumerate() {
            let record = record?;
            if record.len() < 2 {
                return Err(KernelError::Malformed(format!("row {row}: expected node and colour")));
            }
            let color_field = &record[record.len() - 1];
            let Ok(color) = color_field.parse::<u8>() else {
                if row == 0 {
                    continue;
                }
                return Err(KernelError::Malformed(format!("row {row}: bad colour `{color_field}`")));
            };
            let mut node = Vec::new();
            for field in record.iter().take(record.len() - 1) {
                let cleaned = field.trim_matches(|c| c == '[' || c == ']' || c == '{' || c == '}');
                for tok in cleaned.split([' ', ';']).filter(|t| !t.is_empty()) {
                    let x = tok
                        .parse::<u64>()
                        .map_err(|_| KernelError::Malformed(format!("row {row}: bad element `{tok}`")))?;
                    node.push(x);
                }
            }
            entries.push((node, color));
        }
        ColoringTable::from_entries(None, ground, None, &entries)
    }

    pub fn from_json(reader: impl Read) -> Result<ColoringTable, KernelError> {
        let parsed: JsonColoring = serde_json::from_reader(reader)?;
        let entries: Vec<(Vec<u64>, u8)> = parsed.entries.into_iter().map(|e| (e.node, e.color)).collect();
        ColoringTable::from_entries(parsed.arity, parsed.ground, parsed.colors, &entries)
    }

    pub fn arity(&self) -> usize {
        self.arity
    }

    pub fn ground(&self) -> u64 {
        self.ground
    }

    pub fn colors(&self) -> u8 {
        self.colors
    }

    pub fn color(&self, subset: &[u64]) -> u8 {
        self.table[colex_rank(subset)]
    }

    pub fn entries(&self) -> Vec<(Vec<u64>, u8)> {
        k_subsets(self.ground, self.arity)
            .into_iter()
            .map(|s| {
                let c = self.color(&s);
                (s, c)
            })
            .collect()
    }
}

/// Pair colouring by parity of `i + j`.
pub fn sum_parity_coloring(ground: u64) -> ColoringTable {
    ColoringTable::from_fn(2, ground, 2, |s| ((s[0] + s[1]) % 2) as u8)
}

/// The pentagon colouring of pairs of `{0..4}`: colour 1 iff `j − i ∈ {1, 4}`.
pub fn pentagon_coloring() -> ColoringTable {
    ColoringTable::from_fn(2, 5, 2, |s| u8::from(matches!(s[1] - s[0], 1 | 4)))
}

fn is_homogeneous(coloring: &ColoringTable, set: &[u64]) -> Option<u8> {
    let mut color = None;
    for idx in k_subsets(set.len() as u64, coloring.arity) {
        let sub: Vec<u64> = idx.iter().map(|&i| set[i as usize]).collect();
        let c = coloring.color(&sub);
        match color {
            None => color = Some(c),
            Some(prev) if prev != c => return None,
            _ => {}
        }
    }
    Some(color.unwrap_or(0))
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct RamseySearch {
    pub ground: u64,
    pub arity: usize,
    pub k: usize,
    pub witness: Option<Vec<u64>>,
    pub color: Option<u8>,
    pub candidates_examined: u64,
    pub recheck: bool,
}

/// Whether, below the sorted set `node`, some subtree of increasing
/// sequences from `{0..=max}` keeps at least `threshold` children at every
/// node shorter than `level` and has every length-`level` node satisfy
/// `target == side`. Tries every `threshold`-subset of children.
pub fn branching_subtree_exists(
    node: &[u64],
    level: usize,
    max: u64,
    threshold: usize,
    side: bool,
    target: &dyn Fn(&[u64]) -> bool,
) -> bool {
    if node.len() >= level {
        return target(&node[..level]) == side;
    }
    let start = node.last().map_or(0, |m| m + 1);
    if start > max {
        return threshold == 0;
    }
    let kids: Vec<u64> = (start..=max).collect();
    k_subsets(kids.len() as u64, threshold).into_iter().any(|pick| {
        pick.iter().all(|&i| {
            let mut next = node.to_vec();
            next.push(kids[i as usize]);
            branching_subtree_exists(&next, level, max, threshold, side, target)
        })
    })
}

/// Lexicographically first `k`-subset of the colouring's ground whose
/// `arity`-subsets all share one colour.
pub fn finite_ramsey_search(coloring: &ColoringTable, k: usize) -> RamseySearch {
    let mut examined = 0;
    for cand in k_subsets(coloring.ground, k) {
        examined += 1;
        if k < coloring.arity {
            continue;
        }
        if let Some(c) = is_homogeneous(coloring, &cand) {
            let recheck = recheck_homogeneous(coloring, &cand, c);
            return RamseySearch {
                ground: coloring.ground,
                arity: coloring.arity,
                k,
                witness: Some(cand),
                color: Some(c),
                candidates_examined: examined,
                recheck,
            };
        }
    }
    RamseySearch {
        ground: coloring.ground,
        arity: coloring.arity,
        k,
        witness: None,
        color: None,
        candidates_examined: examined,
        recheck: examined == binomial(coloring.ground, k as u64),
    }
}

/// Independent single pass over the n-subsets of `set`.
pub fn recheck_homogeneous(coloring: &ColoringTable, set: &[u64], color: u8) -> bool {
    let n = coloring.arity;
    let mut ok = set.windows(2).all(|w| w[0] < w[1]);
    let mut idx: Vec<usize> = (0..n).collect();
    if n > set.len() {
        return ok;
    }
    loop {
        let sub: Vec<u64> = idx.iter().map(|&i| set[i]).collect();
        ok &= coloring.color(&sub) == color;
        let mut j = n;
        while j > 0 && idx[j - 1] == set.len() - n + j - 1 {
            j -= 1;
        }
        if j == 0 {
            break;
        }
        idx[j - 1] += 1;
        for t in j..n {
            idx[t] = idx[t - 1] + 1;
        }
    }
    ok
}

/// Per-size outcome of a minimal-number search.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct LevelStats {
    pub ground: usize,
    /// Avoiding colourings up to renaming colours.
    pub canonical_avoiders: u64,
    /// Avoiding colourings counted with colour names.
    pub avoiders: u64,
    pub nodes_visited: u64,
    pub example: Option<Vec<u8>>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct NumberReport {
    pub value: usize,
    pub levels: Vec<LevelStats>,
    pub audited: bool,
}

fn falling(r: u64, u: u64) -> u64 {
    (0..u).map(|i| r - i).product()
}

/// Backtracking over colourings of `slots` in order; `constraints[i]` lists
/// the groups that become fully coloured when slot `i` is assigned, each
/// group given by the slot indices it contains (including `i`). A colouring
/// avoids when no group is monochromatic.
struct Avoider<'a> {
    constraints: &'a [Vec<Vec<usize>>],
    colors: u8,
    colouring: Vec<u8>,
    canonical: u64,
    expanded: u64,
    nodes: u64,
    example: Option<Vec<u8>>,
}

impl Avoider<'_> {
    fn run(&mut self, slot: usize, used: u8) {
        self.nodes += 1;
        if slot == self.colouring.len() {
            self.canonical += 1;
            self.expanded += falling(self.colors as u64, used as u64);
            if self.example.is_none() {
                self.example = Some(self.colouring.clone());
            }
            return;
        }
        let limit = (used + 1).min(self.colors);
        for c in 0..limit {
            self.colouring[slot] = c;
            let bad = self.constraints[slot].iter().any(|g| g.iter().all(|&i| self.colouring[i] == c));
            if !bad {
                self.run(slot + 1, used.max(c + 1));
            }
        }
    }
}

fn audit_count(constraints: &[Vec<Vec<usize>>], slots: usize, colors: u8) -> Result<u64, KernelError> {
    let total = (colors as u128).pow(slots as u32);
    if total > 1 << 26 {
        return Err(KernelError::AuditTooLarge(total));
    }
    let count = (0..total as u64)
        .into_par_iter()
        .filter(|&idx| {
            let mut col = vec![0u8; slots];
            let mut x = idx;
            for slot in col.iter_mut() {
                *slot = (x % colors as u64) as u8;
                x /= colors as u64;
            }
            constraints.iter().flatten().all(|g| !g.iter().all(|&i| col[i] == col[g[0]]))
        })
        .count();
    Ok(count as u64)
}

fn minimal_number(
    max_n: usize,
    colors: u8,
    audit: bool,
    instance: impl Fn(usize) -> (usize, Vec<Vec<Vec<usize>>>),
) -> Result<NumberReport, KernelError> {
    let mut levels = Vec::new();
    for n in 0..=max_n {
        let (slots, constraints) = instance(n);
        let mut search = Avoider {
            constraints: &constraints,
            colors,
            colouring: vec![0; slots],
            canonical: 0,
            expanded: 0,
            nodes: 0,
            example: None,
        };
        search.run(0, 0);
        if audit {
            let plain = audit_count(&constraints, slots, colors)?;
            assert_eq!(plain, search.expanded, "symmetry-reduced count disagrees with plain enumeration at {n}");
        }
        let found = search.expanded == 0;
        levels.push(LevelStats {
            ground: n,
            canonical_avoiders: search.canonical,
            avoiders: search.expanded,
            nodes_visited: search.nodes,
            example: search.example,
        });
        if found {
            return Ok(NumberReport { value: n, levels, audited: audit });
        }
    }
    Err(KernelError::NotFound(max_n))
}

/// Least `N <= max_n` such that every `r`-colouring of the `n`-subsets of
/// `{0..N-1}` has a homogeneous `k`-set.
///
/// Colourings are explored up to renaming of colours; `audit` re-counts the
/// avoiding colourings by plain enumeration at every size.
pub fn ramsey_number_oracle(n: usize, k: usize, r: u8, max_n: usize, audit: bool) -> Result<NumberReport, KernelError> {
    minimal_number(max_n, r, audit, |ground| {
        let nodes = k_subsets(ground as u64, n);
        let mut slot_of = HashMap::new();
        let mut order: Vec<Vec<u64>> = nodes;
        order.sort_by_key(|s| colex_rank(s));
        for (i, s) in order.iter().enumerate() {
            slot_of.insert(s.clone(), i);
        }
        let mut constraints = vec![Vec::new(); order.len()];
        if k >= n {
            for big in k_subsets(ground as u64, k) {
                let group: Vec<usize> = k_subsets(k as u64, n)
                    .into_iter()
                    .map(|idx| slot_of[&idx.iter().map(|&i| big[i as usize]).collect::<Vec<u64>>()])
                    .collect();
                let last = *group.iter().max().expect("k >= n");
                constraints[last].push(group);
            }
        }
        (order.len(), constraints)
    })
}

/// Colouring of the nonempty subsets of `{0..ground-1}`, indexed by bitmask.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct UnionsColoring {
    ground: u32,
    colors: u8,
    table: Vec<u8>,
}

impl UnionsColoring {
    pub fn from_fn(ground: u32, colors: u8, f: impl Fn(u64) -> u8) -> UnionsColoring {
        assert!(ground < 26, "unions colourings are desk scale");
        let table = (0..1u64 << ground).map(|m| if m == 0 { 0 } else { f(m) }).collect();
        UnionsColoring { ground, colors, table }
    }

    pub fn ground(&self) -> u32 {
        self.ground
    }

    pub fn colors(&self) -> u8 {
        self.colors
    }

    pub fn color(&self, mask: u64) -> u8 {
        self.table[mask as usize]
    }
}

pub fn mask_elements(mask: u64) -> Vec<u64> {
    (0..64).filter(|b| mask >> b & 1 == 1).collect()
}

fn mask_of(elements: &[u64]) -> u64 {
    elements.iter().fold(0, |m, &x| m | 1 << x)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct UnionsSearch {
    pub ground: u32,
    pub blocks: usize,
    pub witness: Option<Vec<Vec<u64>>>,
    pub color: Option<u8>,
    pub nodes_visited: u64,
    pub recheck: bool,
}

/// Nonempty subsets of `{lo..hi-1}` in lexicographic order of their sorted
/// element lists.
fn lex_subsets(lo: u64, hi: u64) -> Vec<Vec<u64>> {
    let mut out = Vec::new();
    let mut cur = Vec::new();
    fn go(start: u64, hi: u64, cur: &mut Vec<u64>, out: &mut Vec<Vec<u64>>) {
        for x in start..hi {
            cur.push(x);
            out.push(cur.clone());
            go(x + 1, hi, cur, out);
            cur.pop();
        }
    }
    go(lo, hi, &mut cur, &mut out);
    out
}

/// Lexicographically least sequence of `b` blocks `s_1 < … < s_b` inside
/// `{0..N-1}` all of whose nonempty unions share one colour.
pub fn finite_unions_search(coloring: &UnionsColoring, b: usize) -> UnionsSearch {
    struct Dfs<'a> {
        coloring: &'a UnionsColoring,
        b: usize,
        chosen: Vec<Vec<u64>>,
        unions: Vec<u64>,
        nodes: u64,
    }
    impl Dfs<'_> {
        fn go(&mut self, start: u64) -> bool {
            self.nodes += 1;
            if self.chosen.len() == self.b {
                return true;
            }
            for block in lex_subsets(start, self.coloring.ground as u64) {
                let m = mask_of(&block);
                let color = self.unions.first().map_or(self.coloring.color(m), |&u| self.coloring.color(u));
                let extended: Vec<u64> = self.unions.iter().map(|&u| u | m).chain([m]).collect();
                if extended.iter().all(|&u| self.coloring.color(u) == color) {
                    let prev_len = self.unions.len();
                    self.unions.extend(extended);
                    let next = block.last().expect("nonempty") + 1;
                    self.chosen.push(block);
                    if self.go(next) {
                        return true;
                    }
                    self.chosen.pop();
                    self.unions.truncate(prev_len);
                }
            }
            false
        }
    }
    let mut dfs = Dfs { coloring, b, chosen: Vec::new(), unions: Vec::new(), nodes: 0 };
    let found = dfs.go(0);
    if found && b > 0 {
        let color = coloring.color(mask_of(&dfs.chosen[0]));
        let recheck = recheck_unions(coloring, &dfs.chosen, color);
        UnionsSearch {
            ground: coloring.ground,
            blocks: b,
            witness: Some(dfs.chosen),
            color: Some(color),
            nodes_visited: dfs.nodes,
            recheck,
        }
    } else if found {
        UnionsSearch {
            ground: coloring.ground,
            blocks: 0,
            witness: Some(vec![]),
            color: None,
            nodes_visited: dfs.nodes,
            recheck: true,
        }
    } else {
        UnionsSearch {
            ground: coloring.ground,
            blocks: b,
            witness: None,
            color: None,
            nodes_visited: dfs.nodes,
            recheck: true,
        }
    }
}

/// Re-validates a block sequence: ordered, nonempty, inside the ground and
/// every nonempty union coloured `color`.
pub fn recheck_unions(coloring: &UnionsColoring, blocks: &[Vec<u64>], color: u8) -> bool {
    let ordered = blocks.iter().all(|b| !b.is_empty() && b.windows(2).all(|w| w[0] < w[1]))
        && blocks.windows(2).all(|w| w[0].last() < w[1].first())
        && blocks.iter().flatten().all(|&x| x < coloring.ground as u64);
    if !ordered {
        return false;
    }
    let masks: Vec<u64> = blocks.iter().map(|b| mask_of(b)).collect();
    (1u64..1 << masks.len()).all(|sel| {
        let u = (0..masks.len()).filter(|i| sel >> i & 1 == 1).fold(0, |acc, i| acc | masks[i]);
        coloring.color(u) == color
    })
}

/// Least `N <= max_n` such that every `r`-colouring of the nonempty subsets
/// of `{0..N-1}` admits a monochromatic-unions sequence of `b` blocks.
pub fn unions_number_oracle(b: usize, r: u8, max_n: usize, audit: bool) -> Result<NumberReport, KernelError> {
    minimal_number(max_n, r, audit, |ground| {
        let slots = (1usize << ground) - 1;
        let mut constraints = vec![Vec::new(); slots];
        if b == 0 {
            return (slots, constraints);
        }
        // slot of mask m is m - 1; a b-block sequence with union U splits the
        // elements of U into b consecutive runs
        for u in 1u64..1 << ground {
            let els = mask_elements(u);
            if els.len() < b {
                continue;
            }
            for cuts in k_subsets(els.len() as u64 - 1, b - 1) {
                let mut bounds = vec![0usize];
                bounds.extend(cuts.iter().map(|&c| c as usize + 1));
                bounds.push(els.len());
                let masks: Vec<u64> = bounds.windows(2).map(|w| mask_of(&els[w[0]..w[1]])).collect();
                let group: Vec<usize> = (1u64..1 << b)
                    .map(|sel| {
                        let m = (0..b).filter(|i| sel >> i & 1 == 1).fold(0, |acc, i| acc | masks[i]);
                        m as usize - 1
                    })
                    .collect();
                constraints[u as usize - 1].push(group);
            }
        }
        (slots, constraints)
    })
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub enum SweepOutcome<I> {
    Verified(u64),
    Counterexample { index: u64, instance: I },
}

impl<I> SweepOutcome<I> {
    pub fn is_verified(&self) -> bool {
        matches!(self, SweepOutcome::Verified(_))
    }
}

/// Checks `property` on every instance in order; stops at the first failure.
pub fn exhaustive_sweep<I>(family: impl IntoIterator<Item = I>, property: impl Fn(&I) -> bool) -> SweepOutcome<I> {
    let mut count = 0;
    for instance in family {
        if !property(&instance) {
            return SweepOutcome::Counterexample { index: count, instance };
        }
        count += 1;
    }
    SweepOutcome::Verified(count)
}

/// Parallel sweep over instances `0..count`; the reported counterexample is
/// the least failing index regardless of scheduling.
pub fn exhaustive_sweep_par<I: Send>(
    count: u64,
    generate: impl Fn(u64) -> I + Sync + Send,
    property: impl Fn(&I) -> bool + Sync + Send,
) -> SweepOutcome<I> {
    let failing = (0..count).into_par_iter().find_first(|&i| !property(&generate(i)));
    match failing {
        Some(index) => SweepOutcome::Counterexample { index, instance: generate(index) },
        None => SweepOutcome::Verified(count),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn colex_ranks_are_dense() {
        let mut ranks: Vec<usize> = k_subsets(6, 3).iter().map(|s| colex_rank(s)).collect();
        ranks.sort_unstable();
        assert_eq!(ranks, (0..20).collect::<Vec<_>>());
    }

    #[test]
    fn pigeonhole_for_singletons() {
        for idx in 0..64 {
            let c = ColoringTable::from_index(1, 6, 2, idx);
            let res = finite_ramsey_search(&c, 3);
            assert!(res.witness.is_some() && res.recheck);
        }
    }

    #[test]
    fn pentagon_has_no_triangle() {
        let res = finite_ramsey_search(&pentagon_coloring(), 3);
        assert_eq!(res.witness, None);
        assert_eq!(res.candidates_examined, 10);
    }

    #[test]
    fn sum_parity_witness() {
        let res = finite_ramsey_search(&sum_parity_coloring(6), 3);
        assert_eq!(res.witness, Some(vec![0, 2, 4]));
        assert_eq!(res.color, Some(0));
    }

    #[test]
    fn small_ramsey_numbers() {
        assert_eq!(ramsey_number_oracle(1, 2, 2, 6, true).unwrap().value, 3);
        let r33 = ramsey_number_oracle(2, 3, 2, 7, true).unwrap();
        assert_eq!(r33.value, 6);
        // the pentagon and its complement are the only shapes avoiding triangles on five points
        assert_eq!(r33.levels[5].avoiders, 12);
        assert!(matches!(ramsey_number_oracle(2, 3, 2, 5, false), Err(KernelError::NotFound(5))));
    }

    #[test]
    fn unions_basics() {
        let mono = UnionsColoring::from_fn(5, 1, |_| 0);
        assert_eq!(finite_unions_search(&mono, 3).witness, Some(vec![vec![0], vec![1], vec![2]]));
        let parity = UnionsColoring::from_fn(4, 2, |m| (m.count_ones() % 2) as u8);
        assert_eq!(finite_unions_search(&parity, 2).witness, Some(vec![vec![0, 1], vec![2, 3]]));
        let parity3 = UnionsColoring::from_fn(3, 2, |m| (m.count_ones() % 2) as u8);
        assert_eq!(finite_unions_search(&parity3, 2).witness, None);
        assert_eq!(unions_number_oracle(1, 2, 4, true).unwrap().value, 1);
        assert!(matches!(unions_number_oracle(2, 2, 2, false), Err(KernelError::NotFound(2))));
    }

    #[test]
    fn csv_forms() {
        let text = "node,color\n0 1,0\n[0 2],1\n1;2,0\n";
        let c = ColoringTable::from_csv(text.as_bytes(), None).unwrap();
        assert_eq!((c.arity(), c.ground(), c.colors()), (2, 3, 2));
        assert_eq!(c.color(&[0, 2]), 1);
        let spread = "0,1,0\n0,2,1\n1,2,0\n";
        assert_eq!(ColoringTable::from_csv(spread.as_bytes(), None).unwrap(), c);
        assert!(ColoringTable::from_csv("0 1,0\n0 2,x\n".as_bytes(), None).is_err());
        assert!(ColoringTable::from_csv("0 1,0\n".as_bytes(), Some(3)).is_err());
    }

    #[test]
    fn json_form() {
        let text = r#"{"arity":2,"ground":3,"entries":[{"node":[0,1],"color":0},{"node":[0,2],"color":1},{"node":[1,2],"color":0}]}"#;
        let c = ColoringTable::from_json(text.as_bytes()).unwrap();
        assert_eq!(c.color(&[0, 2]), 1);
    }

    #[test]
    fn sweeps() {
        assert_eq!(exhaustive_sweep(0..10, |_| true), SweepOutcome::Verified(10));
        assert_eq!(exhaustive_sweep(0..10, |&x| x != 7), SweepOutcome::Counterexample { index: 7, instance: 7 });
        assert_eq!(
            exhaustive_sweep_par(100, |i| i, |&x| x % 40 != 39),
            SweepOutcome::Counterexample { index: 39, instance: 39 }
        );
    }
}
