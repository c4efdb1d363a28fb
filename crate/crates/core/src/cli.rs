//! Command-line front end. Every command prints one JSON certificate with a
//! `schema` version and a `kind` discriminator.
//!
//! Exit codes: 0 success, 1 mathematical failure or oracle disagreement,
//! 2 usage or parse error.

use std::ffi::OsString;
use std::fs::File;
use std::io::{BufReader, Write};
use std::path::{Path, PathBuf};
use std::sync::Arc;

use clap::{Args, Parser, Subcommand};
use serde_json::{json, Value};

use crate::filter_trees::{
    diagonalize_to_real, fuse_into_h, ramsey_pipeline, remove_child_at_stem, sigma_fuse, tree_certificate,
    FilterAssignment, LazyTree, LevelTarget, NodeSet, ShrinkRule, TreeError,
};
use crate::pigeonhole_kernels::{
    finite_ramsey_search, finite_unions_search, pentagon_coloring, ramsey_number_oracle, recheck_homogeneous,
    sum_parity_coloring, unions_number_oracle, ColoringTable, UnionsColoring,
};
use crate::spaces::{check_axioms, space_by_name, Approx, Real};
use crate::star_core::{
    germ_apply_affine, germ_eq_witness, germ_member_witness, scip_witness, FilterOracle, Germ, PeriodicSet,
};

pub const SCHEMA: u32 = 1;
pub const JOBS_ENV: &str = "RAMSEY_FORGE_JOBS";

#[derive(Debug, Parser)]
#[command(name = "ramsey-forge", version, about = "Filter trees, Ramsey spaces and finite pigeonhole oracles")]
pub struct Cli {
    /// Worker threads for the parallel kernels (RAMSEY_FORGE_JOBS wins).
    #[arg(long, global = true)]
    pub jobs: Option<usize>,
    /// Write the certificate here instead of stdout.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Finite-scale checks of the four space axioms.
    Axioms(AxiomsArgs),
    /// Ramsey pipeline on a colouring, cross-checked with brute force.
    Ramsey(RamseyArgs),
    /// Lexicographically first monochromatic block sequence.
    Unions(UnionsArgs),
    /// Fuse a uniform tree into a node set, optionally removing stem children.
    Fuse(FuseArgs),
    /// Diagonalize a uniform tree to a real.
    Diag(DiagArgs),
    /// Evaluate germ judgements.
    Germ(GermArgs),
    /// Minimal ground sizes by exhaustive search.
    Rnumber(RnumberArgs),
}

#[derive(Debug, Args)]
pub struct AxiomsArgs {
    #[arg(long)]
    pub space: String,
    #[arg(long, default_value_t = 10)]
    pub ground: u64,
    #[arg(long, default_value_t = 3)]
    pub depth: usize,
    #[arg(long, default_value_t = 8)]
    pub trials: usize,
}

#[derive(Debug, Args)]
pub struct RamseyArgs {
    /// CSV (`node,color` rows) or JSON colouring file.
    #[arg(long, conflicts_with = "builtin")]
    pub coloring: Option<PathBuf>,
    /// `sum-parity` or `pentagon`.
    #[arg(long)]
    pub builtin: Option<String>,
    /// Ground size: elements are 0..ground-1.
    #[arg(long)]
    pub ground: Option<u64>,
    /// Size of the homogeneous set sought.
    #[arg(long, default_value_t = 3)]
    pub k: usize,
    /// Children needed for a node to count as large; defaults to k.
    #[arg(long)]
    pub threshold: Option<usize>,
    #[arg(long, default_value = "frechet")]
    pub filter: String,
}

#[derive(Debug, Args)]
pub struct UnionsArgs {
    #[arg(long)]
    pub ground: u32,
    #[arg(long, default_value_t = 2)]
    pub blocks: usize,
    /// `size-parity`, `min-parity`, `max-parity`, or a JSON file holding an
    /// array of colours indexed by subset mask.
    #[arg(long, default_value = "size-parity")]
    pub coloring: String,
}

#[derive(Debug, Args)]
pub struct FuseArgs {
    #[arg(long, default_value = "ellentuck")]
    pub space: String,
    /// Stem as a JSON node, e.g. `[0]` or `[[0,1]]`.
    #[arg(long, default_value = "[]")]
    pub stem: String,
    /// Branching codes of the tree at every node.
    #[arg(long, default_value = "mod=1; res=[0]")]
    pub branch: PeriodicSet,
    /// Codes allowed by the node set at every node.
    #[arg(long, default_value = "mod=1; res=[0]")]
    pub h: PeriodicSet,
    #[arg(long, default_value = "frechet")]
    pub filter: String,
    #[arg(long, default_value_t = 12)]
    pub bound: u64,
    #[arg(long, default_value_t = 3)]
    pub depth: usize,
    /// Child codes removed one level at a time by countable fusion.
    #[arg(long = "remove-child")]
    pub remove_child: Vec<u64>,
}

#[derive(Debug, Args)]
pub struct DiagArgs {
    #[arg(long, default_value = "[]")]
    pub stem: String,
    #[arg(long, default_value = "mod=1; res=[0]")]
    pub branch: PeriodicSet,
    #[arg(long, default_value = "frechet")]
    pub filter: String,
    #[arg(long, default_value_t = 4)]
    pub depth: usize,
    #[arg(long, default_value_t = 16)]
    pub terms: usize,
    #[arg(long, default_value_t = 16)]
    pub bound: u64,
}

#[derive(Debug, Args)]
pub struct GermArgs {
    #[command(subcommand)]
    pub op: GermOp,
}

#[derive(Debug, Subcommand)]
pub enum GermOp {
    /// Agreement of two germs.
    Eq { a: Germ, b: Germ },
    /// Membership of a germ in a periodic set: `member G in S`.
    Member {
        germ: Germ,
        #[arg(num_args = 1..=2)]
        rest: Vec<String>,
    },
    /// `u·φ + v`.
    Apply { u: u64, v: u64, germ: Germ },
    /// Nondecreasing germ below a given one.
    Witness { germ: Germ },
}

#[derive(Debug, Args)]
pub struct RnumberArgs {
    #[command(subcommand)]
    pub which: RnumberKind,
}

#[derive(Debug, Subcommand)]
pub enum RnumberKind {
    /// Least ground forcing a k-set homogeneous for every r-colouring of n-sets.
    Ramsey {
        #[arg(long)]
        n: usize,
        #[arg(long)]
        k: usize,
        #[arg(long, default_value_t = 2)]
        r: u8,
        #[arg(long, default_value_t = 12)]
        max_n: usize,
        #[arg(long)]
        audit: bool,
    },
    /// Least ground forcing b monochromatic blocks with all unions.
    Unions {
        #[arg(long)]
        b: usize,
        #[arg(long, default_value_t = 2)]
        r: u8,
        #[arg(long, default_value_t = 8)]
        max_n: usize,
        #[arg(long)]
        audit: bool,
    },
}

#[derive(Debug)]
enum CliError {
    Usage(String),
    Failure(String),
}

impl From<TreeError> for CliError {
    fn from(e: TreeError) -> Self {
        CliError::Failure(e.to_string())
    }
}

/// A certificate plus whether the command's mathematical check succeeded.
struct Outcome {
    body: Value,
    ok: bool,
}

/// Runs the CLI on `args` (program name first) and returns the exit code.
pub fn run<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = write!(stderr, "{}", e.render());
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    if let Some(out) = &cli.out {
        let parent = out.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
        if !parent.is_dir() {
            let _ = writeln!(stderr, "error: output directory {} does not exist", parent.display());
            return 2;
        }
    }
    let jobs = match jobs(&cli) {
        Ok(j) => j,
        Err(msg) => {
            let _ = writeln!(stderr, "error: {msg}");
            return 2;
        }
    };
    let pool = match rayon::ThreadPoolBuilder::new().num_threads(jobs).build() {
        Ok(p) => p,
        Err(e) => {
            let _ = writeln!(stderr, "error: {e}");
            return 2;
        }
    };
    let result = pool.install(|| dispatch(&cli.command));
    match result {
        Ok(outcome) => {
            let mut body = outcome.body;
            if let Value::Object(map) = &mut body {
                map.insert("schema".into(), json!(SCHEMA));
            }
            let mut text = serde_json::to_string_pretty(&body).expect("plain data");
            text.push('\n');
            let written = match &cli.out {
                Some(path) => std::fs::write(path, text.as_bytes()),
                None => stdout.write_all(text.as_bytes()),
            };
            if let Err(e) = written {
                let _ = writeln!(stderr, "error: {e}");
                return 2;
            }
            if outcome.ok {
                0
            } else {
                1
            }
        }
        Err(CliError::Usage(msg)) => {
            let _ = writeln!(stderr, "error: {msg}");
            2
        }
        Err(CliError::Failure(msg)) => {
            let _ = writeln!(stderr, "failure: {msg}");
            1
        }
    }
}

fn jobs(cli: &Cli) -> Result<usize, String> {
    let requested = match std::env::var(JOBS_ENV) {
        Ok(v) => Some(v.trim().parse::<usize>().map_err(|_| format!("{JOBS_ENV}={v} is not a count"))?),
        Err(_) => cli.jobs,
    };
    match requested {
        Some(0) => Err("jobs must be positive".into()),
        Some(n) => Ok(n),
        None => Ok(0),
    }
}

fn dispatch(cmd: &Command) -> Result<Outcome, CliError> {
    match cmd {
        Command::Axioms(a) => cmd_axioms(a),
        Command::Ramsey(a) => cmd_ramsey(a),
        Command::Unions(a) => cmd_unions(a),
        Command::Fuse(a) => cmd_fuse(a),
        Command::Diag(a) => cmd_diag(a),
        Command::Germ(a) => cmd_germ(&a.op),
        Command::Rnumber(a) => cmd_rnumber(&a.which),
    }
}

fn positive(name: &str, v: u64) -> Result<(), CliError> {
    if v == 0 {
        return Err(CliError::Usage(format!("--{name} must be positive")));
    }
    Ok(())
}

fn parse_filter(s: &str) -> Result<FilterOracle, CliError> {
    s.parse().map_err(|e| CliError::Usage(format!("filter `{s}`: {e}")))
}

fn parse_node(s: &str) -> Result<Approx, CliError> {
    serde_json::from_str(s).map_err(|e| CliError::Usage(format!("node `{s}`: {e}")))
}

fn cmd_axioms(a: &AxiomsArgs) -> Result<Outcome, CliError> {
    let space = space_by_name(&a.space).map_err(|e| CliError::Usage(e.to_string()))?;
    positive("ground", a.ground)?;
    positive("depth", a.depth as u64)?;
    let report = check_axioms(space.as_ref(), a.ground, a.depth, a.trials);
    let ok = report.all_pass();
    Ok(Outcome { body: json!({ "kind": "axioms", "report": report }), ok })
}

fn load_coloring(a: &RamseyArgs) -> Result<ColoringTable, CliError> {
    if let Some(name) = &a.builtin {
        return match name.as_str() {
            "sum-parity" => Ok(sum_parity_coloring(a.ground.unwrap_or(6))),
            "pentagon" => Ok(pentagon_coloring()),
            other => Err(CliError::Usage(format!("unknown builtin colouring `{other}`"))),
        };
    }
    let path = a.coloring.as_ref().ok_or_else(|| CliError::Usage("give --coloring or --builtin".into()))?;
    let file = File::open(path).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))?;
    let reader = BufReader::new(file);
    let parsed = if path.extension().is_some_and(|e| e == "json") {
        ColoringTable::from_json(reader)
    } else {
        ColoringTable::from_csv(reader, a.ground)
    };
    parsed.map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))
}

fn cmd_ramsey(a: &RamseyArgs) -> Result<Outcome, CliError> {
    let table = load_coloring(a)?;
    if table.colors() != 2 {
        return Err(CliError::Usage("the pipeline handles two-colourings only".into()));
    }
    positive("k", a.k as u64)?;
    let oracle = parse_filter(&a.filter)?;
    let n = table.arity();
    let ground = table.ground();
    let oracle_run = finite_ramsey_search(&table, a.k);
    let shared = Arc::new(table.clone());
    let target = LevelTarget::of_sets(n, move |s| shared.color(s) == 0);
    let threshold = a.threshold.unwrap_or(a.k);
    let pipeline = ramsey_pipeline(n, &target, &Real::naturals(), &oracle, ground.saturating_sub(1), threshold, a.k)?;
    let pipeline_ok = pipeline
        .witness
        .as_ref()
        .is_none_or(|w| recheck_homogeneous(&table, w, if pipeline.inside == Some(true) { 0 } else { 1 }));
    let agree = pipeline_ok && pipeline.witness.is_some() == oracle_run.witness.is_some();
    Ok(Outcome {
        body: json!({
            "kind": "ramsey",
            "ground": ground,
            "arity": n,
            "k": a.k,
            "threshold": threshold,
            "filter": oracle.describe(),
            "pipeline": pipeline,
            "oracle": oracle_run,
            "agree": agree,
        }),
        ok: agree,
    })
}

fn cmd_unions(a: &UnionsArgs) -> Result<Outcome, CliError> {
    positive("ground", a.ground as u64)?;
    if a.ground > 20 {
        return Err(CliError::Usage("--ground above 20 is out of reach".into()));
    }
    let coloring = match a.coloring.as_str() {
        "size-parity" => UnionsColoring::from_fn(a.ground, 2, |m| (m.count_ones() % 2) as u8),
        "min-parity" => UnionsColoring::from_fn(a.ground, 2, |m| (m.trailing_zeros() % 2) as u8),
        "max-parity" => UnionsColoring::from_fn(a.ground, 2, |m| ((63 - m.leading_zeros()) % 2) as u8),
        path => {
            let file = File::open(path).map_err(|e| CliError::Usage(format!("{path}: {e}")))?;
            let table: Vec<u8> =
                serde_json::from_reader(BufReader::new(file)).map_err(|e| CliError::Usage(format!("{path}: {e}")))?;
            if table.len() != 1 << a.ground {
                return Err(CliError::Usage(format!("{path}: expected {} colours", 1u64 << a.ground)));
            }
            let colors = table.iter().max().copied().unwrap_or(0).max(1) + 1;
            UnionsColoring::from_fn(a.ground, colors, |m| table[m as usize])
        }
    };
    let search = finite_unions_search(&coloring, a.blocks);
    let ok = search.witness.is_none() || search.recheck;
    Ok(Outcome { body: json!({ "kind": "unions", "coloring": a.coloring, "search": search }), ok })
}

fn cmd_fuse(a: &FuseArgs) -> Result<Outcome, CliError> {
    let space = space_by_name(&a.space).map_err(|e| CliError::Usage(e.to_string()))?;
    let stem = space.validate(parse_node(&a.stem)?).map_err(|e| CliError::Usage(e.to_string()))?;
    positive("bound", a.bound)?;
    positive("depth", a.depth as u64)?;
    let f = FilterAssignment::constant(parse_filter(&a.filter)?);
    let tree = LazyTree::uniform(space.clone(), stem, a.bound, a.branch.clone());
    let h_codes = a.h.clone();
    let h = NodeSet::code_tree(space.clone(), move |_| h_codes.clone());
    let fused = match fuse_into_h(&tree, &f, &h, a.depth) {
        Ok(t) => t,
        Err(e @ (TreeError::PromiseViolated(_) | TreeError::StemNotInH(_))) => {
            return Ok(Outcome { body: json!({ "kind": "fuse", "error": e.to_string() }), ok: false });
        }
        Err(e) => return Err(e.into()),
    };
    let avoiders: Vec<ShrinkRule> = a.remove_child.iter().map(|&c| remove_child_at_stem(c)).collect();
    let result = match sigma_fuse(&fused, &f, &avoiders, a.depth) {
        Ok(t) => t,
        Err(e) => return Ok(Outcome { body: json!({ "kind": "fuse", "error": e.to_string() }), ok: false }),
    };
    let cert = tree_certificate(&result, &f, a.depth, None);
    let ok = cert["filterReport"]["value"] == json!("True");
    Ok(Outcome { body: json!({ "kind": "fuse", "removed": a.remove_child, "certificate": cert }), ok })
}

fn cmd_diag(a: &DiagArgs) -> Result<Outcome, CliError> {
    let space = space_by_name("ellentuck").expect("built in");
    let stem = space.validate(parse_node(&a.stem)?).map_err(|e| CliError::Usage(e.to_string()))?;
    positive("depth", a.depth as u64)?;
    let oracle = parse_filter(&a.filter)?;
    let tree = LazyTree::uniform(space, stem.clone(), a.bound, a.branch.clone());
    match diagonalize_to_real(&tree, &oracle, &stem, a.depth) {
        Ok(x) => {
            let terms: Vec<u64> = (0..a.terms).map(|i| x.element(i)).collect();
            let f = FilterAssignment::constant(oracle);
            Ok(Outcome {
                body: json!({
                    "kind": "diag",
                    "real": terms,
                    "certificate": tree_certificate(&tree, &f, a.depth, None),
                }),
                ok: true,
            })
        }
        Err(e @ (TreeError::ValidationFailed(_) | TreeError::EmptyCube)) => {
            Ok(Outcome { body: json!({ "kind": "diag", "error": e.to_string() }), ok: false })
        }
        Err(e) => Err(e.into()),
    }
}

fn cmd_germ(op: &GermOp) -> Result<Outcome, CliError> {
    let body = match op {
        GermOp::Eq { a, b } => {
            let j = germ_eq_witness(a, b);
            json!({ "kind": "germ", "op": "eq", "a": a, "b": b, "value": j.value, "indexSet": j.index_set })
        }
        GermOp::Member { germ, rest } => {
            let set_text = match rest.as_slice() {
                [kw, s] if kw == "in" => s,
                [s] => s,
                _ => return Err(CliError::Usage("expected `member GERM in SET`".into())),
            };
            let set: PeriodicSet = set_text.parse().map_err(|e| CliError::Usage(format!("set `{set_text}`: {e}")))?;
            let j = germ_member_witness(germ, &set);
            json!({ "kind": "germ", "op": "member", "germ": germ, "set": set, "value": j.value, "indexSet": j.index_set })
        }
        GermOp::Apply { u, v, germ } => {
            let out = germ_apply_affine(*u, *v, germ);
            json!({ "kind": "germ", "op": "apply", "u": u, "v": v, "germ": germ, "result": out })
        }
        GermOp::Witness { germ } => match scip_witness(germ) {
            Ok(w) => {
                let j = germ_eq_witness(germ, &w);
                json!({ "kind": "germ", "op": "witness", "germ": germ, "witness": w, "value": j.value, "indexSet": j.index_set })
            }
            Err(e) => {
                return Ok(Outcome {
                    body: json!({ "kind": "germ", "op": "witness", "germ": germ, "error": e.to_string() }),
                    ok: false,
                })
            }
        },
    };
    Ok(Outcome { body, ok: true })
}

fn cmd_rnumber(which: &RnumberKind) -> Result<Outcome, CliError> {
    let report = match *which {
        RnumberKind::Ramsey { n, k, r, max_n, audit } => {
            positive("n", n as u64)?;
            ramsey_number_oracle(n, k, r, max_n, audit)
                .map(|rep| json!({ "kind": "rnumber", "family": "ramsey", "n": n, "k": k, "r": r, "report": rep }))
        }
        RnumberKind::Unions { b, r, max_n, audit } => {
            positive("b", b as u64)?;
            unions_number_oracle(b, r, max_n, audit)
                .map(|rep| json!({ "kind": "rnumber", "family": "unions", "b": b, "r": r, "report": rep }))
        }
    };
    match report {
        Ok(body) => Ok(Outcome { body, ok: true }),
        Err(e) => Err(CliError::Failure(e.to_string())),
    }
}
