//! Acceptance run: one PASS/FAIL line per criterion, nonzero exit on any
//! failure. Oracles here are written independently of the library paths
//! they check.

use std::collections::{BTreeMap, BTreeSet};
use std::process::Command;
use std::sync::Arc;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use ramsey_forge::filter_trees::{
    diagonalize_to_real, fuse_into_h, gfh_partition, intersect_trees, prune_level, sigma_fuse, stem_condition,
    tree_from_cube, FilterAssignment, LazyTree, LevelTarget, Mode, NodeSet, ShrinkRule, TreeError, Verdict,
};
use ramsey_forge::pigeonhole_kernels::{
    finite_ramsey_search, finite_unions_search, pentagon_coloring, ramsey_number_oracle, recheck_homogeneous,
    unions_number_oracle, ColoringTable, UnionsColoring,
};
use ramsey_forge::spaces::{check_axioms, Approx, Ellentuck, Milliken, Real, SpaceInstance};
use ramsey_forge::star_core::{
    assert_infinite_if_member, germ_member, germ_member_witness, scip_diagonalize, Chain, FilterOracle, Germ,
    PeriodicSet, Tri,
};

const AXIOM_BUDGET: Duration = Duration::from_secs(60);
const RAMSEY_BUDGET: Duration = Duration::from_secs(120);
const UNIONS_BUDGET: Duration = Duration::from_secs(300);
/// R(3,3), computed by `triangle_free_exists` below and then frozen.
const R33: usize = 6;

type Check = Result<String, String>;
type Criterion = (&'static str, fn() -> Check);

fn main() {
    let criteria: [Criterion; 10] = [
        ("axiom suite", axiom_suite),
        ("ramsey oracle agreement", ramsey_agreement),
        ("partition engine vs brute force", partition_engine),
        ("fusion postconditions", fusion_postconditions),
        ("countable fusion avoids targets", countable_fusion),
        ("intersection stem condition", intersection_equivalence),
        ("diagonalization", diagonalization),
        ("germ calculus", germ_calculus),
        ("finite unions", finite_unions),
        ("cli determinism", cli_determinism),
    ];
    let mut failed = 0;
    for (name, check) in criteria {
        let start = Instant::now();
        let outcome = check();
        let secs = start.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => println!("PASS {name} ({detail}; {secs:.1}s)"),
            Err(why) => {
                failed += 1;
                println!("FAIL {name}: {why} ({secs:.1}s)");
            }
        }
    }
    if failed > 0 {
        std::process::exit(1);
    }
}

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn set(v: &[u64]) -> Approx {
    Approx::Set(v.to_vec())
}

fn axiom_suite() -> Check {
    let mut lines = Vec::new();
    let runs: [(&dyn SpaceInstance, u64, usize); 2] = [(&Ellentuck, 10, 3), (&Milliken, 8, 2)];
    for (space, ground, depth) in runs {
        let start = Instant::now();
        let report = check_axioms(space, ground, depth, 8);
        let took = start.elapsed();
        ensure(report.all_pass(), || format!("{} failed: {}", space.name(), serde_json::to_string(&report).unwrap()))?;
        ensure(took < AXIOM_BUDGET, || format!("{} took {took:?}", space.name()))?;
        lines.push(format!("{} {:.2}s", space.name(), took.as_secs_f64()));
    }
    Ok(lines.join(", "))
}

/// Whether some 2-colouring of the pairs of `{0..n-1}` has no
/// monochromatic triangle.
fn triangle_free_exists(n: usize) -> bool {
    let pairs: Vec<(usize, usize)> = (0..n).flat_map(|i| (i + 1..n).map(move |j| (i, j))).collect();
    let index = |i: usize, j: usize| pairs.iter().position(|&p| p == (i, j)).unwrap();
    let triangles: Vec<[usize; 3]> = (0..n)
        .flat_map(|a| (a + 1..n).flat_map(move |b| (b + 1..n).map(move |c| (a, b, c))))
        .map(|(a, b, c)| [index(a, b), index(a, c), index(b, c)])
        .collect();
    (0u64..1 << pairs.len()).any(|col| {
        triangles.iter().all(|t| {
            let bits = t.map(|e| col >> e & 1);
            !(bits[0] == bits[1] && bits[1] == bits[2])
        })
    })
}

fn ramsey_agreement() -> Check {
    let start = Instant::now();
    for index in 0u64..1 << 15 {
        let table = ColoringTable::from_index(2, 6, 2, index);
        let found = finite_ramsey_search(&table, 3);
        let w = found.witness.ok_or_else(|| format!("colouring {index} has no size-3 witness"))?;
        ensure(w.len() == 3 && found.recheck && recheck_homogeneous(&table, &w, found.color.unwrap()), || {
            format!("colouring {index}: bad witness {w:?}")
        })?;
    }
    ensure(finite_ramsey_search(&pentagon_coloring(), 3).witness.is_none(), || "pentagon has a witness".into())?;
    let independent = (3..=8).find(|&n| !triangle_free_exists(n)).unwrap();
    ensure(independent == R33, || format!("independent sweep says {independent}"))?;
    let report = ramsey_number_oracle(2, 3, 2, 8, false).map_err(|e| e.to_string())?;
    ensure(report.value == R33, || format!("oracle returned {}", report.value))?;
    let took = start.elapsed();
    ensure(took < RAMSEY_BUDGET, || format!("took {took:?}"))?;
    Ok(format!("32768 colourings, pentagon none, R(3,3) = {}", report.value))
}

/// Whether a subtree with every node below level 2 keeping at least `k`
/// children sits under `node` with every level-2 node on `side`.
fn branching_witness(node: &[u64], side: bool, k: usize, color: &ColoringTable) -> bool {
    if node.len() == 2 {
        return (color.color(node) == 0) == side;
    }
    let start = node.last().map_or(0, |m| m + 1);
    let kids: Vec<u64> = (start..=5).collect();
    any_k_subset(&kids, k, &mut Vec::new(), 0, &mut |chosen| {
        chosen.iter().all(|&c| {
            let mut next = node.to_vec();
            next.push(c);
            branching_witness(&next, side, k, color)
        })
    })
}

fn any_k_subset(items: &[u64], k: usize, cur: &mut Vec<u64>, from: usize, f: &mut dyn FnMut(&[u64]) -> bool) -> bool {
    if cur.len() == k {
        return f(cur);
    }
    for i in from..items.len() {
        cur.push(items[i]);
        let hit = any_k_subset(items, k, cur, i + 1, f);
        cur.pop();
        if hit {
            return true;
        }
    }
    false
}

fn partition_engine() -> Check {
    let space: Arc<dyn SpaceInstance> = Arc::new(Ellentuck);
    let full = LazyTree::full(space, set(&[]), 5);
    let f = FilterAssignment::constant(FilterOracle::Frechet);
    let mut tally: BTreeMap<String, u64> = BTreeMap::new();
    for threshold in [2usize, 3] {
        for index in 0u64..1 << 15 {
            let table = Arc::new(ColoringTable::from_index(2, 6, 2, index));
            let t2 = table.clone();
            let target = LevelTarget::of_sets(2, move |s| t2.color(s) == 0);
            let got = gfh_partition(&full, &f, &target, Mode::Finite { ground: 5, threshold })
                .map_err(|e| e.to_string())?
                .verdict;
            let want = if branching_witness(&[], true, threshold, &table) {
                Verdict::Inside
            } else if branching_witness(&[], false, threshold, &table) {
                Verdict::Outside
            } else {
                Verdict::HereditarilyUndecided
            };
            ensure(got == want, || {
                format!("threshold {threshold}, colouring {index}: engine {got:?}, brute force {want:?}")
            })?;
            *tally.entry(format!("k={threshold} {want:?}")).or_default() += 1;
        }
    }
    Ok(format!("0 disagreements over 2x32768; {tally:?}"))
}

/// A set eventually containing `r mod m`, with random extra residues mod
/// `2m` and a few finite holes.
fn filter_set(rng: &mut ChaCha8Rng, m: u64, r: u64) -> PeriodicSet {
    let modulus = 2 * m;
    let mut res: BTreeSet<u64> = [r, r + m].into();
    for x in 0..modulus {
        if rng.gen_bool(0.3) {
            res.insert(x);
        }
    }
    let res: Vec<u64> = res.into_iter().collect();
    let holes: Vec<u64> = (0..rng.gen_range(0..4)).map(|_| rng.gen_range(0..16)).collect();
    PeriodicSet::new(modulus, &res, &[], &[]).unwrap().difference(&PeriodicSet::finite(holes))
}

fn node_hash(s: &Approx) -> u64 {
    s.elements().iter().fold(s.len() as u64, |h, &x| h.wrapping_mul(31).wrapping_add(x))
}

/// Tree whose branching at `s` is `base` minus one code near `floor(s)`.
fn wobbly_tree(space: Arc<dyn SpaceInstance>, stem: Approx, bound: u64, base: PeriodicSet) -> LazyTree {
    LazyTree::new(space, stem, bound, move |s| {
        let hole = s.floor() + node_hash(s) % 4;
        ramsey_forge::filter_trees::BranchSet::Described(base.difference(&PeriodicSet::finite([hole])))
    })
}

fn germ_filter(m: u64, r: u64) -> FilterOracle {
    FilterOracle::GermFilter(Germ::affine(m, r))
}

fn fusion_postconditions() -> Check {
    let space: Arc<dyn SpaceInstance> = Arc::new(Ellentuck);
    let mut rng = ChaCha8Rng::seed_from_u64(0xf05e);
    let depth = 5;
    for trial in 0..500 {
        let m = rng.gen_range(1..=3);
        let r = rng.gen_range(0..m);
        let f = FilterAssignment::constant(germ_filter(m, r));
        let base = filter_set(&mut rng, m, r);
        let hcodes = filter_set(&mut rng, m, r);
        let h_per_node = hcodes.clone();
        let h = NodeSet::code_tree(space.clone(), move |s| {
            h_per_node.difference(&PeriodicSet::finite([s.floor() + 1 + node_hash(s) % 3]))
        });
        let mut stem = Vec::new();
        for _ in 0..rng.gen_range(0..=2) {
            let from = stem.last().map_or(0, |x: &u64| x + 1) + rng.gen_range(0..3);
            let node = set(&stem);
            let next = h.codes(&node).next_member(from).unwrap();
            stem.push(next);
        }
        let t = wobbly_tree(space.clone(), set(&stem), 12 + 2 * stem.len() as u64, base);
        let s = fuse_into_h(&t, &f, &h, depth).map_err(|e| format!("trial {trial}: {e}"))?;
        ensure(s.stem() == t.stem(), || format!("trial {trial}: stem moved"))?;
        for node in s.nodes_above_stem(depth) {
            ensure(t.contains(&node), || format!("trial {trial}: {node} not in T"))?;
            ensure(h.contains(&node), || format!("trial {trial}: {node} not in H"))?;
        }
    }
    let mut caught = 0;
    for trial in 0..100 {
        let m = rng.gen_range(1..=3);
        let r = rng.gen_range(0..m);
        let f = FilterAssignment::constant(germ_filter(m, r));
        // wide enough that the planted level is reached
        let t = wobbly_tree(space.clone(), set(&[]), 24, filter_set(&mut rng, m, r));
        let bad_level = rng.gen_range(0..depth);
        let hcodes = filter_set(&mut rng, m, r);
        let class = PeriodicSet::residue_class(m, r);
        let h = NodeSet::code_tree(space.clone(), move |s| {
            if s.len() == bad_level {
                hcodes.difference(&class)
            } else {
                hcodes.clone()
            }
        });
        match fuse_into_h(&t, &f, &h, depth) {
            Err(TreeError::PromiseViolated(at)) if at.len() == bad_level => caught += 1,
            other => return Err(format!("planted violation {trial} at level {bad_level}: got {other:?}")),
        }
    }
    Ok(format!("500 instances hold, {caught}/100 violations caught"))
}

fn countable_fusion() -> Check {
    let space: Arc<dyn SpaceInstance> = Arc::new(Ellentuck);
    let mut rng = ChaCha8Rng::seed_from_u64(0x51_6a);
    let f = FilterAssignment::constant(FilterOracle::Frechet);
    let bound = 10;
    let mut branches = 0usize;
    for trial in 0..20 {
        let full = LazyTree::full(space.clone(), set(&[]), bound);
        let mut targets = Vec::new();
        let mut avoiders: Vec<ShrinkRule> = Vec::new();
        for k in 0..3 {
            let level = k + 1 + rng.gen_range(0..3);
            let candidates = full.level(level);
            let forbidden: BTreeSet<Approx> = candidates.iter().filter(|_| rng.gen_bool(0.35)).cloned().collect();
            avoiders.push(prune_level(level, forbidden.clone()));
            targets.push((level, forbidden));
        }
        let s = sigma_fuse(&full, &f, &avoiders, 6).map_err(|e| format!("trial {trial}: {e}"))?;
        let leaves = s.level(6);
        ensure(!leaves.is_empty(), || format!("trial {trial}: no depth-6 branches inside the bound"))?;
        for leaf in &leaves {
            ensure(full.contains(leaf), || format!("trial {trial}: {leaf} escaped T"))?;
            for (level, forbidden) in &targets {
                ensure(!forbidden.contains(&leaf.prefix(*level)), || {
                    format!("trial {trial}: {leaf} meets the set determined at level {level}")
                })?;
            }
        }
        branches += leaves.len();
    }
    Ok(format!("20 trials, {branches} depth-6 prefixes avoid all targets"))
}

/// Codes of the children of `u` in the node set of `t`.
fn raw_child_codes(t: &LazyTree, u: &Approx) -> PeriodicSet {
    let stem = t.stem();
    if u.len() < stem.len() {
        if u.is_prefix_of(stem) {
            return PeriodicSet::finite([stem.elements()[u.len()]]);
        }
        return PeriodicSet::empty();
    }
    if !t.contains(u) {
        return PeriodicSet::empty();
    }
    t.branch(u).as_periodic().unwrap().intersect(&PeriodicSet::tail(u.floor()))
}

/// Filter-tree test on the raw node-set intersection: descend through
/// single-child nodes to the stem, then require large branching.
fn raw_intersection_is_filter_tree(
    a: &LazyTree,
    b: &LazyTree,
    oracle: &FilterOracle,
    depth: usize,
    bound: u64,
) -> bool {
    let codes = |u: &Approx| raw_child_codes(a, u).intersect(&raw_child_codes(b, u));
    let mut stem = Vec::new();
    loop {
        let c = codes(&set(&stem));
        if c.is_finite() && c.members_up_to(u64::MAX >> 1).len() == 1 {
            stem.push(c.next_member(0).unwrap());
        } else {
            break;
        }
    }
    let mut level = vec![set(&stem)];
    for _ in 0..depth {
        let mut next = Vec::new();
        for u in &level {
            let c = codes(u);
            if oracle.large(&c) != Tri::True {
                return false;
            }
            let mut els = u.elements();
            for x in c.members_up_to(bound) {
                els.push(x);
                next.push(set(&els));
                els.pop();
            }
        }
        level = next;
    }
    true
}

fn intersection_equivalence() -> Check {
    let space: Arc<dyn SpaceInstance> = Arc::new(Ellentuck);
    let mut rng = ChaCha8Rng::seed_from_u64(0x1_7e75);
    let (depth, bound) = (3, 10);
    let (mut held, mut failed) = (0, 0);
    for trial in 0..300 {
        let (oracle, m, r) = if trial % 2 == 0 { (FilterOracle::Frechet, 1, 0) } else { (germ_filter(2, 0), 2, 0) };
        let make = |rng: &mut ChaCha8Rng| {
            if m == 1 {
                let holes: Vec<u64> = (0..rng.gen_range(0..4)).map(|_| rng.gen_range(0..10)).collect();
                PeriodicSet::all().difference(&PeriodicSet::finite(holes))
            } else {
                filter_set(rng, m, r)
            }
        };
        let stem_a: Vec<u64> = {
            let mut v: Vec<u64> = (0..rng.gen_range(0..=2)).map(|_| rng.gen_range(0..6)).collect();
            v.sort_unstable();
            v.dedup();
            v
        };
        let a = wobbly_tree(space.clone(), set(&stem_a), bound, make(&mut rng));
        let stem_b = if rng.gen_bool(0.5) {
            let mut node = set(&stem_a);
            for _ in 0..rng.gen_range(0..=2) {
                let kids = a.children(&node);
                if kids.is_empty() {
                    break;
                }
                node = kids[rng.gen_range(0..kids.len().min(4))].clone();
            }
            node
        } else {
            let mut v: Vec<u64> = (0..rng.gen_range(0..=3)).map(|_| rng.gen_range(0..8)).collect();
            v.sort_unstable();
            v.dedup();
            set(&v)
        };
        let b = wobbly_tree(space.clone(), stem_b, bound, make(&mut rng));
        let (x, y) = if rng.gen_bool(0.5) { (a, b) } else { (b, a) };
        let f = FilterAssignment::constant(oracle.clone());
        let condition = stem_condition(&x, &y);
        let raw = raw_intersection_is_filter_tree(&x, &y, &oracle, depth, bound);
        let lib = intersect_trees(&x, &y, &f, depth).is_ok();
        ensure(condition == raw && raw == lib, || {
            format!(
                "trial {trial}: stems {} / {}: condition {condition}, raw {raw}, intersect_trees {lib}",
                x.stem(),
                y.stem()
            )
        })?;
        if condition {
            held += 1;
        } else {
            failed += 1;
        }
    }
    Ok(format!("300 pairs, 0 mismatches; condition held {held}, failed {failed}"))
}

fn diagonalization() -> Check {
    let space: Arc<dyn SpaceInstance> = Arc::new(Ellentuck);
    let mut rng = ChaCha8Rng::seed_from_u64(0xd1a6);
    let depth = 5;
    for trial in 0..100 {
        let m = rng.gen_range(1..=3);
        let r = rng.gen_range(0..m);
        let beta = germ_filter(m, r);
        let mut stem: Vec<u64> = (0..rng.gen_range(0..=2)).map(|_| rng.gen_range(0..6)).collect();
        stem.sort_unstable();
        stem.dedup();
        let t = wobbly_tree(space.clone(), set(&stem), 14, filter_set(&mut rng, m, r));
        let x = diagonalize_to_real(&t, &beta, &set(&stem), depth).map_err(|e| format!("trial {trial}: {e}"))?;
        ensure(x.rn(stem.len()) == set(&stem), || format!("trial {trial}: X does not start with s"))?;
        let picks: Vec<u64> = (stem.len()..stem.len() + 9).map(|i| x.element(i)).collect();
        for size in 0..=depth {
            let mut bad = None;
            any_k_subset(&picks, size, &mut Vec::new(), 0, &mut |f| {
                let mut node = stem.clone();
                node.extend_from_slice(f);
                if !t.contains(&set(&node)) {
                    bad = Some(node);
                    return true;
                }
                false
            });
            if let Some(node) = bad {
                return Err(format!("trial {trial}: {node:?} in [s,X] but not in T"));
            }
        }
    }
    for trial in 0..100 {
        let m = rng.gen_range(1..=3);
        let r = rng.gen_range(0..m);
        let beta = germ_filter(m, r);
        let ground = filter_set(&mut rng, m, r);
        let x = Real::from_set(ground.clone()).unwrap();
        let s: Vec<u64> = ground.members_up_to(12).into_iter().filter(|_| rng.gen_bool(0.3)).take(3).collect();
        let t = tree_from_cube(space.clone(), &set(&s), &x, &beta, 24).map_err(|e| format!("cube {trial}: {e}"))?;
        let y = diagonalize_to_real(&t, &beta, &set(&s), depth).map_err(|e| format!("cube {trial}: {e}"))?;
        let floor = set(&s).floor();
        let above = |r: &Real| -> Vec<u64> { r.elements_up_to(40).into_iter().filter(|&e| e >= floor).collect() };
        ensure(above(&x) == above(&y), || format!("cube {trial}: {:?} vs {:?}", above(&x), above(&y)))?;
        let cube_nodes = |r: &Real| {
            let mut out = vec![set(&s)];
            let mut level = vec![set(&s)];
            for _ in 0..depth {
                level = level
                    .iter()
                    .flat_map(|u| {
                        let codes = space.extension_codes(u, r, 16).unwrap();
                        codes.into_iter().map(|c| space.child(u, c).unwrap()).collect::<Vec<_>>()
                    })
                    .collect();
                out.extend(level.iter().cloned());
            }
            out
        };
        ensure(cube_nodes(&x) == cube_nodes(&y), || format!("cube {trial}: truncated cubes differ"))?;
    }
    Ok("100 trees inside T to depth 5, 100 cube round trips exact".into())
}

fn germ_panel() -> Vec<Germ> {
    vec![
        Germ::identity(),
        Germ::affine(2, 1),
        Germ::affine(5, 3),
        Germ::quasi_linear(2, vec![0, 1], vec![3, 5], 0).unwrap(),
    ]
}

fn germ_calculus() -> Check {
    let mut family = Vec::new();
    for m in 1..=6u64 {
        for res_mask in 0u64..1 << m {
            let res: Vec<u64> = (0..m).filter(|i| res_mask >> i & 1 == 1).collect();
            for prefix in 0u64..1 << 12 {
                let plus: Vec<u64> =
                    (0..12).filter(|&i| prefix >> i & 1 == 1 && res_mask >> (i % m) & 1 == 0).collect();
                let minus: Vec<u64> =
                    (0..12).filter(|&i| prefix >> i & 1 == 0 && res_mask >> (i % m) & 1 == 1).collect();
                family.push(PeriodicSet::new(m, &res, &plus, &minus).unwrap());
            }
        }
    }
    let germs = germ_panel();
    let probe = 12 + 2 * 60;
    for (i, a) in family.iter().enumerate() {
        let b = &family[(i * 7919 + 13) % family.len()];
        let (u, n, d) = (a.union(b), a.intersect(b), a.difference(b));
        for x in 0..probe {
            let (ia, ib) = (a.contains(x), b.contains(x));
            ensure(u.contains(x) == (ia || ib) && n.contains(x) == (ia && ib) && d.contains(x) == (ia && !ib), || {
                format!("{a} vs {b}: set operation wrong at {x}")
            })?;
        }
        let same_members = (0..probe).all(|x| a.contains(x) == b.contains(x));
        ensure((a == b) == same_members, || format!("{a} vs {b}: equality disagrees with membership"))?;
        ensure(a.is_subset(b) == d.is_empty(), || format!("{a} vs {b}: subset disagrees with difference"))?;
        let g = &germs[i % germs.len()];
        let (ja, jb) = (germ_member_witness(g, a).index_set, germ_member_witness(g, b).index_set);
        ensure(germ_member_witness(g, &u).index_set == ja.union(&jb), || format!("{g} ∈ {a} ∪ {b}"))?;
        ensure(germ_member_witness(g, &n).index_set == ja.intersect(&jb), || format!("{g} ∈ {a} ∩ {b}"))?;
        ensure(germ_member_witness(g, &d).index_set == ja.difference(&jb), || format!("{g} ∈ {a} ∖ {b}"))?;
        if a.is_subset(b) {
            ensure(ja.is_subset(&jb), || format!("{g}: {a} ⊆ {b} not preserved"))?;
        }
        ensure(assert_infinite_if_member(g, a), || format!("{g} in finite {a}"))?;
        if germ_member(g, a) == Tri::True {
            ensure(a.is_infinite(), || format!("{g} in finite {a}"))?;
        }
    }

    let mut rng = ChaCha8Rng::seed_from_u64(0x5c1f);
    for trial in 0..50 {
        let mut sets = Vec::new();
        let mut cur = PeriodicSet::tail(rng.gen_range(0..4));
        for _ in 0..33 {
            let holes: Vec<u64> = (0..rng.gen_range(0..3)).map(|_| rng.gen_range(0..120)).collect();
            cur = cur.difference(&PeriodicSet::finite(holes)).intersect(&PeriodicSet::tail(rng.gen_range(0..40)));
            sets.push(cur.clone());
        }
        let chain = Chain::Finite(sets.clone());
        let xs = scip_diagonalize(&chain, &FilterOracle::Frechet, 32).map_err(|e| format!("chain {trial}: {e}"))?;
        for n in 0..31 {
            ensure(sets[n].contains(xs[n + 1]), || format!("chain {trial}: x_{} = {} not in X_{n}", n + 1, xs[n + 1]))?;
        }
    }
    Ok(format!("{} sets x {} germs, 50 chains x 32 terms", family.len(), germs.len()))
}

/// Every completion of `fixed` has a witness: complete with colour 0, take
/// the witness found, and branch on the first of its masks not yet fixed.
fn every_completion_has_witness(
    ground: u32,
    fixed: &mut BTreeMap<u64, u8>,
    leaves: &mut u64,
) -> Option<BTreeMap<u64, u8>> {
    let snapshot = fixed.clone();
    let coloring = UnionsColoring::from_fn(ground, 2, |m| snapshot.get(&m).copied().unwrap_or(0));
    let found = finite_unions_search(&coloring, 2);
    let Some(blocks) = found.witness else {
        return Some(snapshot);
    };
    let masks: Vec<u64> = {
        let a: u64 = blocks[0].iter().map(|&x| 1 << x).sum();
        let b: u64 = blocks[1].iter().map(|&x| 1 << x).sum();
        vec![a, b, a | b]
    };
    match masks.iter().find(|m| !fixed.contains_key(m)) {
        None => {
            *leaves += 1;
            None
        }
        Some(&m) => {
            for c in 0..2 {
                fixed.insert(m, c);
                let bad = every_completion_has_witness(ground, fixed, leaves);
                fixed.remove(&m);
                if bad.is_some() {
                    return bad;
                }
            }
            None
        }
    }
}

fn finite_unions() -> Check {
    let start = Instant::now();
    let report = unions_number_oracle(2, 2, 8, false).map_err(|e| e.to_string())?;
    let n = report.value;
    let mut leaves = 0;
    if let Some(bad) = every_completion_has_witness(n as u32, &mut BTreeMap::new(), &mut leaves) {
        return Err(format!("colouring of {n} without witness: {bad:?}"));
    }
    let below = report
        .levels
        .iter()
        .find(|l| l.ground == n - 1)
        .and_then(|l| l.example.clone())
        .ok_or_else(|| format!("no counterexample recorded at {}", n - 1))?;
    let counter = UnionsColoring::from_fn((n - 1) as u32, 2, |m| below[m as usize - 1]);
    ensure(finite_unions_search(&counter, 2).witness.is_none(), || {
        format!("recorded colouring at {} has a witness", n - 1)
    })?;
    let took = start.elapsed();
    ensure(took < UNIONS_BUDGET, || format!("took {took:?}"))?;
    Ok(format!("N* = {n}; all colourings at N* covered by {leaves} witness classes; counterexample at {}", n - 1))
}

fn cli_determinism() -> Check {
    let exe = env!("CARGO_BIN_EXE_ramsey-forge");
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let csv = dir.path().join("pentagon.csv");
    std::fs::write(&csv, "node,color\n0 1,0\n1 2,0\n2 3,0\n3 4,0\n0 4,0\n0 2,1\n0 3,1\n1 3,1\n1 4,1\n2 4,1\n").unwrap();
    let csv = csv.to_str().unwrap().to_string();
    let commands: Vec<Vec<&str>> = vec![
        vec!["axioms", "--space", "ellentuck", "--ground", "6", "--depth", "2"],
        vec!["axioms", "--space", "milliken", "--ground", "5", "--depth", "2"],
        vec!["ramsey", "--builtin", "sum-parity", "--ground", "6"],
        vec!["ramsey", "--coloring", &csv, "--k", "3"],
        vec!["unions", "--ground", "5", "--coloring", "min-parity"],
        vec![
            "fuse",
            "--branch",
            "mod=2; res=[0]",
            "--h",
            "mod=4; res=[0,2]",
            "--filter",
            "germ:ql:p=1;base=[0];drift=[4];onset=0",
            "--remove-child",
            "8",
        ],
        vec![
            "diag",
            "--stem",
            "[0]",
            "--branch",
            "mod=2; res=[0]",
            "--filter",
            "germ:ql:p=1;base=[0];drift=[2];onset=0",
        ],
        vec!["germ", "eq", "std:5", "std:5"],
        vec!["germ", "member", "ql:p=1;base=[0];drift=[1];onset=0", "in", "mod=2;res=[0]"],
        vec!["germ", "apply", "3", "1", "ql:p=1;base=[0];drift=[1];onset=0"],
        vec!["germ", "witness", "ql:p=2;base=[0,5];drift=[2,2];onset=0"],
        vec!["rnumber", "ramsey", "--n", "2", "--k", "3"],
        vec!["rnumber", "unions", "--b", "2", "--max-n", "6"],
    ];
    for args in &commands {
        let run = || Command::new(exe).args(args).env_remove("RAMSEY_FORGE_JOBS").output().unwrap();
        let (a, b) = (run(), run());
        ensure(a.status.code() == Some(0), || {
            format!("{args:?} exited {:?}: {}", a.status.code(), String::from_utf8_lossy(&a.stderr))
        })?;
        ensure(a.stdout == b.stdout && !a.stdout.is_empty(), || format!("{args:?} is not byte-stable"))?;
        ensure(a.stdout.ends_with(b"\n") && !a.stdout.contains(&b'\r'), || format!("{args:?}: line endings"))?;
    }
    let out = dir.path().join("cert.json");
    let out_s = out.to_str().unwrap();
    let mut files = Vec::new();
    for jobs in ["1", "3"] {
        let status = Command::new(exe)
            .args(["rnumber", "ramsey", "--n", "2", "--k", "3", "--out", out_s])
            .env("RAMSEY_FORGE_JOBS", jobs)
            .status()
            .unwrap();
        ensure(status.success(), || "--out run failed".into())?;
        files.push(std::fs::read(&out).unwrap());
    }
    ensure(files[0] == files[1], || "certificate depends on the job count".into())?;
    Ok(format!("{} commands byte-identical across runs", commands.len()))
}
