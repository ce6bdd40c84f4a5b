//! Command-line front end for the bihomog library.
//!
//! Every command is deterministic given its flags: randomness only enters
//! through explicit seeds, and no command reads the clock or the
//! environment. Results are machine-readable JSON on standard output
//! (except `dot`, which emits Graphviz text); diagnostics go to standard
//! error. Exit codes: 0 on success, 1 on a checked failure (budget
//! exhaustion, invalid input graph semantics, failed verification), 2 on a
//! usage or parse error.

use std::ffi::OsString;
use std::fs;
use std::path::PathBuf;

use clap::error::ErrorKind;
use clap::{Parser, Subcommand};
use serde_json::json;

use bihomog::bits::Bitset;
use bihomog::cover::{extend_in_cover, CoverGraph};
use bihomog::graph::{classify, PartialMap, Sign, SignedCond};
use bihomog::io::{export_dot, parse_graph, serialize_graph};
use bihomog::oracle::{back_and_forth, HashOracle};
use bihomog::split::{
    audit_split_trace, extension_tree, split, GCond, GraphAut, IdentityAut, TreeParams,
};
use bihomog::tower::{build_tower, LimitMap};
use bihomog::Graph;

/// Outcome of one command invocation, separated from process concerns so
/// the whole surface is testable in-process.
pub struct CommandResult {
    pub code: i32,
    pub stdout: String,
    pub stderr: String,
}

impl CommandResult {
    fn ok_json(value: serde_json::Value) -> CommandResult {
        CommandResult {
            code: 0,
            stdout: format!("{value}\n"),
            stderr: String::new(),
        }
    }

    fn checked_failure(diag: String, payload: serde_json::Value) -> CommandResult {
        CommandResult {
            code: 1,
            stdout: format!("{payload}\n"),
            stderr: format!("{diag}\n"),
        }
    }

    fn usage(diag: String) -> CommandResult {
        CommandResult {
            code: 2,
            stdout: String::new(),
            stderr: format!("{diag}\n"),
        }
    }
}

#[derive(Parser)]
#[command(
    name = "bihomog",
    version,
    about = "Homogeneous bipartite graphs: classification, valuation covers, towers, oracles"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Classify a bipartite graph document and report extensionality.
    Classify {
        /// Input graph document (JSON).
        #[arg(long = "in", value_name = "FILE")]
        input: PathBuf,
    },
    /// Materialize the valuation cover of a graph as a graph document.
    ///
    /// Cover rights are labelled [base, valuation].
    Cover {
        /// Input graph document (JSON).
        #[arg(long = "in", value_name = "FILE")]
        input: PathBuf,
        /// Also write the cover document to this file.
        #[arg(long = "out", value_name = "FILE")]
        out: Option<PathBuf>,
    },
    /// Extend a partial automorphism to a total automorphism of the cover.
    Extend {
        /// Input graph document (JSON).
        #[arg(long = "in", value_name = "FILE")]
        input: PathBuf,
        /// Partial map as JSON: {"left":[[x,y],...],"right":[[u,v],...]}.
        #[arg(long, value_name = "JSON")]
        map: String,
    },
    /// Build a tower of stages and print its manifest.
    Tower {
        /// Number of stages to build.
        #[arg(long, default_value_t = 4)]
        stages: usize,
        /// Uniform extension budget per closure stage.
        #[arg(long, default_value_t = 3)]
        k: usize,
    },
    /// Lift a limit map through a tower to a compatible automorphism family.
    Lift {
        /// Number of stages to build.
        #[arg(long, default_value_t = 3)]
        stages: usize,
        /// Uniform extension budget per closure stage.
        #[arg(long, default_value_t = 3)]
        k: usize,
        /// Limit map as JSON: {"left":[[x,y],...],"branches":[[{"stem_stage":s,"stem_index":i},...],...]}.
        #[arg(long, value_name = "JSON")]
        map: String,
    },
    /// Run a back-and-forth isomorphism between two seeded lazy oracles.
    Bnf {
        /// Seed of the first oracle.
        #[arg(long = "seed-a", default_value_t = 1)]
        seed_a: u64,
        /// Seed of the second oracle.
        #[arg(long = "seed-b", default_value_t = 1)]
        seed_b: u64,
        /// Quarter-turns to run (each matches one vertex).
        #[arg(long, default_value_t = 40)]
        steps: usize,
        /// Witness-scan budget per search.
        #[arg(long, default_value_t = 100_000)]
        budget: u64,
    },
    /// Run the two-sided splitting construction over a seeded lazy oracle.
    Split {
        /// Oracle seed.
        #[arg(long, default_value_t = 1)]
        seed: u64,
        /// Number of scheduled steps (demand at step n is n).
        #[arg(long, default_value_t = 16)]
        steps: usize,
        /// Witness-scan budget per search.
        #[arg(long, default_value_t = 100_000)]
        budget: u64,
    },
    /// Grow a binary tree of incompatible set refinements with certificates.
    Tree {
        /// Oracle seed.
        #[arg(long, default_value_t = 1)]
        seed: u64,
        /// Tree depth (1 to 4).
        #[arg(long, default_value_t = 3, value_parser = clap::value_parser!(u8).range(1..=4))]
        depth: u8,
        /// Split steps per node.
        #[arg(long, default_value_t = 64)]
        steps: usize,
        /// Certificates assert complementarity below this bound.
        #[arg(long, default_value_t = 64)]
        probe: u64,
        /// Witness-scan budget per search.
        #[arg(long, default_value_t = 100_000)]
        budget: u64,
    },
    /// Export a graph document as Graphviz DOT text.
    Dot {
        /// Input graph document (JSON).
        #[arg(long = "in", value_name = "FILE")]
        input: PathBuf,
        /// Graph name in the DOT output.
        #[arg(long, default_value = "g")]
        name: String,
    },
}

/// Parse and dispatch one invocation. The first argument is the program
/// name, as in `std::env::args`.
pub fn run<I, T>(args: I) -> CommandResult
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let rendered = e.render().to_string();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => CommandResult {
                    code: 0,
                    stdout: rendered,
                    stderr: String::new(),
                },
                _ => CommandResult {
                    code: 2,
                    stdout: String::new(),
                    stderr: rendered,
                },
            };
        }
    };
    match cli.command {
        Command::Classify { input } => cmd_classify(&input),
        Command::Cover { input, out } => cmd_cover(&input, out.as_deref()),
        Command::Extend { input, map } => cmd_extend(&input, &map),
        Command::Tower { stages, k } => cmd_tower(stages, k),
        Command::Lift { stages, k, map } => cmd_lift(stages, k, &map),
        Command::Bnf {
            seed_a,
            seed_b,
            steps,
            budget,
        } => cmd_bnf(seed_a, seed_b, steps, budget),
        Command::Split {
            seed,
            steps,
            budget,
        } => cmd_split(seed, steps, budget),
        Command::Tree {
            seed,
            depth,
            steps,
            probe,
            budget,
        } => cmd_tree(seed, depth as usize, steps, probe, budget),
        Command::Dot { input, name } => cmd_dot(&input, &name),
    }
}

fn read_graph(path: &std::path::Path) -> Result<Graph, CommandResult> {
    let text = fs::read_to_string(path)
        .map_err(|e| CommandResult::usage(format!("cannot read {}: {e}", path.display())))?;
    parse_graph(&text).map_err(|e| CommandResult::usage(format!("invalid graph document: {e}")))
}

fn cmd_classify(input: &std::path::Path) -> CommandResult {
    let g = match read_graph(input) {
        Ok(g) => g,
        Err(r) => return r,
    };
    let c = classify(&g);
    CommandResult::ok_json(json!({
        "class": format!("{:?}", c.kind),
        "extensional": c.extensional,
    }))
}

/// Materialization bound for `cover`: documents beyond this are unwieldy
/// and the construction itself does not need them spelled out.
const COVER_DOC_LIMIT: u64 = 4096;

fn cmd_cover(input: &std::path::Path, out: Option<&std::path::Path>) -> CommandResult {
    let g = match read_graph(input) {
        Ok(g) => g,
        Err(r) => return r,
    };
    let cover = match CoverGraph::new(&g) {
        Ok(c) => c,
        Err(e) => return CommandResult::checked_failure(e.to_string(), json!({"error": e.to_string()})),
    };
    if cover.left_count() > COVER_DOC_LIMIT || cover.right_count() > COVER_DOC_LIMIT {
        let diag = format!(
            "cover is {}x{}; refusing to materialize beyond {COVER_DOC_LIMIT} per side",
            cover.left_count(),
            cover.right_count()
        );
        return CommandResult::checked_failure(diag.clone(), json!({"error": diag}));
    }
    let lefts: Vec<_> = (0..cover.left_count()).map(|i| cover.left_vertex(i)).collect();
    let mut labels = Vec::new();
    let mut rows = Vec::new();
    for r in 0..cover.right_count() {
        let rv = cover.right_vertex(r);
        let mut row = Bitset::new(lefts.len());
        for (i, lv) in lefts.iter().enumerate() {
            row.set(i, cover.edge(lv, &rv));
        }
        labels.push(vec![rv.base as u32, rv.valuation as u32]);
        rows.push(row);
    }
    let doc = Graph::from_rows(lefts.len(), labels, rows)
        .expect("the cover graph is well formed");
    let text = serialize_graph(&doc, Some("cover"));
    if let Some(path) = out {
        if let Err(e) = fs::write(path, &text) {
            return CommandResult::usage(format!("cannot write {}: {e}", path.display()));
        }
    }
    CommandResult {
        code: 0,
        stdout: if text.ends_with('\n') { text } else { format!("{text}\n") },
        stderr: String::new(),
    }
}

fn parse_pair_list(value: Option<&serde_json::Value>) -> Result<Vec<(usize, usize)>, String> {
    let Some(value) = value else {
        return Ok(Vec::new());
    };
    let arr = value.as_array().ok_or("expected an array of pairs")?;
    let mut out = Vec::new();
    for item in arr {
        let pair = item.as_array().filter(|p| p.len() == 2).ok_or("expected [x, y] pairs")?;
        let x = pair[0].as_u64().ok_or("pair entries must be non-negative integers")?;
        let y = pair[1].as_u64().ok_or("pair entries must be non-negative integers")?;
        out.push((x as usize, y as usize));
    }
    Ok(out)
}

fn cmd_extend(input: &std::path::Path, map: &str) -> CommandResult {
    let g = match read_graph(input) {
        Ok(g) => g,
        Err(r) => return r,
    };
    let doc: serde_json::Value = match serde_json::from_str(map) {
        Ok(v) => v,
        Err(e) => return CommandResult::usage(format!("invalid map JSON: {e}")),
    };
    let mut p = PartialMap::empty();
    match (
        parse_pair_list(doc.get("left")),
        parse_pair_list(doc.get("right")),
    ) {
        (Ok(left), Ok(right)) => {
            p.left = left.into_iter().collect();
            p.right = right.into_iter().collect();
        }
        (Err(e), _) | (_, Err(e)) => {
            return CommandResult::usage(format!("invalid map JSON: {e}"))
        }
    }
    match extend_in_cover(&g, &p) {
        Ok(aut) => CommandResult::ok_json(json!({
            "base_left": aut.left_perm().len(),
            "base_right": aut.right_perm().len(),
            "left_perm": aut.left_perm(),
            "right_perm": aut.right_perm(),
            "flips": aut.flips(),
        })),
        Err(e) => CommandResult::checked_failure(e.to_string(), json!({"error": e.to_string()})),
    }
}

fn cmd_tower(stages: usize, k: usize) -> CommandResult {
    match build_tower(stages, &vec![k; stages]) {
        Ok(tower) => {
            let manifest = serde_json::to_value(tower.manifest())
                .expect("manifest serializes");
            CommandResult::ok_json(manifest)
        }
        Err(e) => CommandResult::checked_failure(e.to_string(), json!({"error": e.to_string()})),
    }
}

fn cmd_lift(stages: usize, k: usize, map: &str) -> CommandResult {
    let tower = match build_tower(stages, &vec![k; stages]) {
        Ok(t) => t,
        Err(e) => return CommandResult::checked_failure(e.to_string(), json!({"error": e.to_string()})),
    };
    let lm: LimitMap = match serde_json::from_str(map) {
        Ok(m) => m,
        Err(e) => return CommandResult::usage(format!("invalid map JSON: {e}")),
    };
    match tower.lift(&lm) {
        Ok(lifted) => {
            let mut stage_report = Vec::new();
            for n in lifted.start_stage()..=tower.depth() {
                if let Some(m) = lifted.stage_map(n) {
                    let (kind, size) = match m {
                        bihomog::tower::StageAut::Partial(p) => ("partial", p.len()),
                        bihomog::tower::StageAut::Total(t) => ("total", t.left.len() + t.right.len()),
                    };
                    stage_report.push(json!({"stage": n, "kind": kind, "size": size}));
                }
            }
            let left_images: Vec<_> = lm
                .left
                .iter()
                .filter_map(|&(x, _)| lifted.left_apply(&tower, x).ok().map(|y| (x, y)))
                .collect();
            let branch_images: Vec<_> = lm
                .branches
                .iter()
                .filter_map(|&(b, _)| lifted.branch_apply(&tower, &b).ok().map(|c| (b, c)))
                .collect();
            CommandResult::ok_json(json!({
                "start_stage": lifted.start_stage(),
                "stages": stage_report,
                "left_images": left_images,
                "branch_images": branch_images,
                "verified": lifted.verify(&tower),
            }))
        }
        Err(e) => CommandResult::checked_failure(e.to_string(), json!({"error": e.to_string()})),
    }
}

fn cmd_bnf(seed_a: u64, seed_b: u64, steps: usize, budget: u64) -> CommandResult {
    let a = HashOracle::new(seed_a);
    let b = HashOracle::new(seed_b);
    match back_and_forth(&a, &b, steps, budget) {
        Ok(map) => {
            let verified = map.verify(&a, &b).unwrap_or(false);
            CommandResult::ok_json(json!({
                "turns": steps,
                "left": map.left,
                "right": map.right,
                "verified": verified,
            }))
        }
        Err(e) => CommandResult::checked_failure(e.to_string(), json!({"error": e.to_string()})),
    }
}

fn identity_schedule(steps: usize) -> Vec<GCond<u64>> {
    (0..steps)
        .map(|_| GCond {
            right: SignedCond::empty(),
            autos: SignedCond::new(vec![(0usize, Sign::Plus)]).expect("single entry"),
        })
        .collect()
}

fn cmd_split(seed: u64, steps: usize, budget: u64) -> CommandResult {
    let oracle = HashOracle::new(seed);
    let id = IdentityAut;
    let gs: Vec<&dyn GraphAut<u64>> = vec![&id];
    let schedule = identity_schedule(steps);
    match split(&oracle, &gs, &schedule, &|n| n, budget) {
        Ok(trace) => {
            if let Err(e) = audit_split_trace(&oracle, &gs, &trace) {
                return CommandResult::checked_failure(
                    format!("audit failed: {e}"),
                    json!({"error": e, "trace": trace}),
                );
            }
            CommandResult::ok_json(json!({"trace": trace, "audit": "ok"}))
        }
        Err(f) => CommandResult::checked_failure(
            f.error.to_string(),
            json!({"error": f.error.to_string(), "partial": f.partial}),
        ),
    }
}

fn cmd_tree(seed: u64, depth: usize, steps: usize, probe: u64, budget: u64) -> CommandResult {
    let oracle = HashOracle::new(seed);
    let id = IdentityAut;
    let gs: Vec<&dyn GraphAut<u64>> = vec![&id];
    let params = TreeParams {
        steps,
        probe,
        budget,
    };
    match extension_tree(&oracle, &gs, depth, &params) {
        Ok(tree) => {
            let mut stdout = String::new();
            for node in &tree.nodes {
                if let Some(cert) = &node.certificate {
                    stdout.push_str(&format!(
                        "CERT ok N={} S={} T={}\n",
                        cert.probe, cert.s_id, cert.t_id
                    ));
                }
            }
            stdout.push_str(&format!(
                "{}\n",
                serde_json::to_value(&tree).expect("tree serializes")
            ));
            CommandResult {
                code: 0,
                stdout,
                stderr: String::new(),
            }
        }
        Err(f) => CommandResult::checked_failure(
            f.error.to_string(),
            json!({"error": f.error.to_string(), "partial": f.partial}),
        ),
    }
}

fn cmd_dot(input: &std::path::Path, name: &str) -> CommandResult {
    let g = match read_graph(input) {
        Ok(g) => g,
        Err(r) => return r,
    };
    let text = export_dot(&g, name);
    CommandResult {
        code: 0,
        stdout: if text.ends_with('\n') { text } else { format!("{text}\n") },
        stderr: String::new(),
    }
}
