//! Command-line driver: graph generation, algorithm runs, verification,
//! and benchmark sweeps.

use std::collections::BTreeMap;
use std::fs;
use std::io::{BufReader, Read, Write};
use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

use shallowsep::clustering::{run_algorithm2_with, ClusterBudgets};
use shallowsep::gen;
use shallowsep::graph::{load_graph, GraphFormat, ProblemParams, WeightedGraph, BALANCE_C};
use shallowsep::minicluster::{run_algorithm3_with, Algo3Config};
use shallowsep::separator::{run_algorithm1, RunStats, SeparatorOutcome};
use shallowsep::verify::{
    verify_minor_certificate, verify_separator, CertTree, CertificateCheck, SeparatorCheck,
};

const EXIT_VERIFY: u8 = 1;
const EXIT_REGIME: u8 = 2;
const EXIT_PARSE: u8 = 3;

#[derive(Parser)]
#[command(name = "shallowsep", about = "Balanced separators or shallow clique minors")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Run one of the separator algorithms on a graph file.
    Run(RunArgs),
    /// Generate a graph file from a named family.
    Gen(GenArgs),
    /// Sweep instances and emit a CSV report.
    Bench(BenchArgs),
    /// Verify an outcome file against its graph.
    Verify(VerifyArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum FormatArg {
    EdgeList,
    Dimacs,
}

impl From<FormatArg> for GraphFormat {
    fn from(f: FormatArg) -> GraphFormat {
        match f {
            FormatArg::EdgeList => GraphFormat::EdgeList,
            FormatArg::Dimacs => GraphFormat::Dimacs,
        }
    }
}

#[derive(Args)]
struct RunArgs {
    /// Algorithm: 1 (oracle baseline), 2 (clustering), 3 (mini clusters).
    #[arg(long, value_parser = clap::value_parser!(u8).range(1..=3))]
    algo: u8,
    #[arg(long)]
    h: usize,
    #[arg(long)]
    ell: usize,
    #[arg(long, default_value_t = 0.5)]
    epsilon: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Graph file; "-" reads stdin.
    #[arg(long)]
    input: String,
    #[arg(long, value_enum, default_value_t = FormatArg::EdgeList)]
    format: FormatArg,
    /// Outcome file; stdout when omitted.
    #[arg(long)]
    output: Option<PathBuf>,
    /// Re-check the outcome with the independent verifier.
    #[arg(long)]
    verify: bool,
    /// Budget overrides as KEY=VAL (b_c, b_t, b_m, total_slack, c_sp, c_e,
    /// delta, d3); SHALLOWSEP_BUDGET_<KEY> env vars supply defaults.
    #[arg(long = "budgets", value_name = "KEY=VAL")]
    budgets: Vec<String>,
}

#[derive(Args)]
struct GenArgs {
    /// Family and its arguments, e.g. `grid 5 5`, `path 100`, `cycle 64`,
    /// `complete 5`, `gnm 100 300 7`, `expander 64 4 7`,
    /// `clique-planted 300 5 2 7`.
    #[arg(required = true)]
    spec: Vec<String>,
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct BenchArgs {
    /// grid | path | gnm | expander
    #[arg(long)]
    family: String,
    /// Comma-separated vertex counts.
    #[arg(long, value_delimiter = ',')]
    ns: Vec<usize>,
    /// Comma-separated values of ell.
    #[arg(long, value_delimiter = ',', default_values_t = vec![8usize])]
    ells: Vec<usize>,
    #[arg(long, default_value_t = 5)]
    h: usize,
    /// Comma-separated algorithm numbers.
    #[arg(long, value_delimiter = ',', default_values_t = vec![1u8])]
    algos: Vec<u8>,
    #[arg(long, default_value_t = 0.5)]
    epsilon: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct VerifyArgs {
    /// Graph file the outcome refers to.
    #[arg(long)]
    input: String,
    #[arg(long, value_enum, default_value_t = FormatArg::EdgeList)]
    format: FormatArg,
    /// Outcome JSON produced by `run`.
    #[arg(long)]
    outcome: PathBuf,
    /// Clique size for certificate outcomes; defaults to the tree count.
    #[arg(long)]
    h: Option<usize>,
}

#[derive(Serialize, Deserialize)]
struct TreeOut {
    root: usize,
    parents: Vec<(usize, usize)>,
}

/// Versioned outcome schema shared by `run` and `verify`.
#[derive(Serialize, Deserialize)]
struct OutcomeFile {
    schema: u32,
    #[serde(rename = "type")]
    kind: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    vertices: Option<Vec<usize>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    trees: Option<Vec<TreeOut>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    cross_edges: Option<Vec<(usize, usize, usize, usize)>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    radius_bound: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    reason: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    stats: Option<serde_json::Value>,
}

impl OutcomeFile {
    fn from_outcome(outcome: &SeparatorOutcome, stats: &RunStats) -> OutcomeFile {
        let stats = serde_json::to_value(stats).ok();
        match outcome {
            SeparatorOutcome::Separator { vertices } => OutcomeFile {
                schema: 1,
                kind: "separator".into(),
                vertices: Some(vertices.clone()),
                trees: None,
                cross_edges: None,
                radius_bound: None,
                reason: None,
                stats,
            },
            SeparatorOutcome::MinorCertificate {
                trees,
                cross_edges,
                radius_bound,
            } => OutcomeFile {
                schema: 1,
                kind: "certificate".into(),
                vertices: None,
                trees: Some(
                    trees
                        .iter()
                        .map(|t| TreeOut {
                            root: t.root,
                            parents: t.parents.clone(),
                        })
                        .collect(),
                ),
                cross_edges: Some(cross_edges.clone()),
                radius_bound: Some(*radius_bound),
                reason: None,
                stats,
            },
            SeparatorOutcome::Rejected { reason } => OutcomeFile {
                schema: 1,
                kind: "rejected".into(),
                vertices: None,
                trees: None,
                cross_edges: None,
                radius_bound: None,
                reason: Some(reason.clone()),
                stats,
            },
        }
    }

    fn cert_trees(&self) -> Vec<CertTree> {
        self.trees
            .as_ref()
            .map(|ts| {
                ts.iter()
                    .map(|t| CertTree {
                        root: t.root,
                        parents: t.parents.clone(),
                    })
                    .collect()
            })
            .unwrap_or_default()
    }
}

fn fail(code: u8, msg: &str) -> ExitCode {
    eprintln!("shallowsep: {msg}");
    ExitCode::from(code)
}

fn read_graph(path: &str, format: FormatArg) -> Result<WeightedGraph, String> {
    let data: Box<dyn Read> = if path == "-" {
        Box::new(std::io::stdin())
    } else {
        Box::new(fs::File::open(path).map_err(|e| format!("{path}: {e}"))?)
    };
    load_graph(BufReader::new(data), format.into()).map_err(|e| format!("{path}: {e}"))
}

fn write_output(path: &Option<PathBuf>, data: &str) -> Result<(), String> {
    match path {
        Some(p) => fs::write(p, data).map_err(|e| format!("{}: {e}", p.display())),
        None => {
            print!("{data}");
            std::io::stdout().flush().map_err(|e| e.to_string())
        }
    }
}

/// Budget table: env defaults overridden by --budgets flags.
fn budget_table(flags: &[String]) -> Result<BTreeMap<String, f64>, String> {
    let mut t = BTreeMap::new();
    for (k, v) in std::env::vars() {
        if let Some(key) = k.strip_prefix("SHALLOWSEP_BUDGET_") {
            let val: f64 = v.parse().map_err(|_| format!("bad value in {k}={v}"))?;
            t.insert(key.to_ascii_lowercase(), val);
        }
    }
    for spec in flags {
        let (k, v) = spec
            .split_once('=')
            .ok_or_else(|| format!("bad budget '{spec}', expected KEY=VAL"))?;
        let val: f64 = v.parse().map_err(|_| format!("bad budget value '{spec}'"))?;
        t.insert(k.to_ascii_lowercase(), val);
    }
    Ok(t)
}

fn run_algo(
    algo: u8,
    g: &WeightedGraph,
    params: ProblemParams,
    budgets: &BTreeMap<String, f64>,
) -> Result<(SeparatorOutcome, RunStats), String> {
    let r = match algo {
        1 => run_algorithm1(g, params),
        2 => {
            let mut b = ClusterBudgets::default();
            if let Some(&v) = budgets.get("b_c") {
                b.b_c = v;
            }
            if let Some(&v) = budgets.get("b_t") {
                b.b_t = v;
            }
            run_algorithm2_with(g, params, &b)
        }
        3 => {
            let mut cfg = Algo3Config::derive(g.n(), &params);
            if let Some(&v) = budgets.get("b_m") {
                cfg.b_m = v;
            }
            if let Some(&v) = budgets.get("total_slack") {
                cfg.total_slack = v;
            }
            if let Some(&v) = budgets.get("c_sp") {
                cfg.c_sp = v;
            }
            if let Some(&v) = budgets.get("c_e") {
                cfg.c_e = v as usize;
            }
            if let Some(&v) = budgets.get("delta") {
                cfg.delta = (v as usize).max(1);
            }
            if let Some(&v) = budgets.get("d3") {
                cfg.d3 = (v as u64).max(1);
            }
            run_algorithm3_with(g, params, &cfg)
        }
        _ => unreachable!("clap range"),
    };
    r.map_err(|e| e.to_string())
}

fn verify_outcome(g: &WeightedGraph, out: &OutcomeFile, h: Option<usize>) -> (bool, String) {
    match out.kind.as_str() {
        "separator" => {
            let vs = out.vertices.clone().unwrap_or_default();
            match verify_separator(g, &vs, BALANCE_C) {
                SeparatorCheck::Ok => (true, "separator ok".into()),
                v => (false, format!("{v:?}")),
            }
        }
        "certificate" => {
            let trees = out.cert_trees();
            let h = h.unwrap_or(trees.len());
            let bound = out.radius_bound.unwrap_or(usize::MAX);
            match verify_minor_certificate(g, &trees, h, bound) {
                CertificateCheck::Ok => (true, "certificate ok".into()),
                v => (false, format!("{v:?}")),
            }
        }
        "rejected" => (true, "rejected outcome, nothing to verify".into()),
        other => (false, format!("unknown outcome type '{other}'")),
    }
}

fn cmd_run(a: RunArgs) -> ExitCode {
    let budgets = match budget_table(&a.budgets) {
        Ok(b) => b,
        Err(e) => return fail(EXIT_PARSE, &e),
    };
    let g = match read_graph(&a.input, a.format) {
        Ok(g) => g,
        Err(e) => return fail(EXIT_PARSE, &e),
    };
    let params = match ProblemParams::new(a.h, a.ell, a.epsilon, a.seed) {
        Ok(p) => p,
        Err(e) => return fail(EXIT_REGIME, &e.to_string()),
    };
    let (outcome, stats) = match run_algo(a.algo, &g, params, &budgets) {
        Ok(r) => r,
        Err(e) => return fail(EXIT_REGIME, &e),
    };
    let file = OutcomeFile::from_outcome(&outcome, &stats);
    let mut json = serde_json::to_string_pretty(&file).expect("serializable outcome");
    json.push('\n');
    if let Err(e) = write_output(&a.output, &json) {
        return fail(EXIT_PARSE, &e);
    }
    if let SeparatorOutcome::Rejected { reason } = &outcome {
        eprintln!("shallowsep: rejected: {reason}");
        return ExitCode::from(EXIT_REGIME);
    }
    if a.verify {
        let (ok, msg) = verify_outcome(&g, &file, Some(a.h));
        if !ok {
            return fail(EXIT_VERIFY, &format!("verification failed: {msg}"));
        }
    }
    ExitCode::SUCCESS
}

/// Serialize in the `p`/`w`/`e` edge-list format, byte-deterministically.
fn format_graph(g: &WeightedGraph) -> String {
    let mut s = String::new();
    s.push_str(&format!("p {} {}\n", g.n(), g.m()));
    for (v, &w) in g.weights().iter().enumerate() {
        if w != 1.0 {
            s.push_str(&format!("w {v} {w}\n"));
        }
    }
    let mut edges: Vec<(usize, usize)> = g
        .edges()
        .iter()
        .map(|&(u, v)| (u.min(v), u.max(v)))
        .collect();
    edges.sort_unstable();
    for (u, v) in edges {
        s.push_str(&format!("e {u} {v}\n"));
    }
    s
}

fn cmd_gen(a: GenArgs) -> ExitCode {
    let arg = |i: usize| -> Result<usize, String> {
        a.spec
            .get(i)
            .ok_or_else(|| format!("{}: missing argument {i}", a.spec[0]))?
            .parse::<usize>()
            .map_err(|e| format!("{}: {e}", a.spec[0]))
    };
    let g = match a.spec[0].as_str() {
        "grid" => arg(1).and_then(|w| arg(2).map(|h| gen::grid(w, h))),
        "path" => arg(1).map(gen::path),
        "cycle" => arg(1).map(gen::cycle),
        "complete" => arg(1).map(gen::complete),
        "gnm" => arg(1).and_then(|n| {
            arg(2).and_then(|m| arg(3).map(|s| gen::gnm(n, m, s as u64)))
        }),
        "expander" => arg(1).and_then(|n| {
            arg(2).and_then(|d| arg(3).map(|s| gen::bounded_degree_expander(n, d, s as u64)))
        }),
        "clique-planted" => arg(1).and_then(|n| {
            arg(2).and_then(|h| {
                arg(3).and_then(|st| arg(4).map(|s| gen::clique_planted(n, h, st, s as u64)))
            })
        }),
        other => Err(format!("unknown family '{other}'")),
    };
    let g = match g {
        Ok(g) => g,
        Err(e) => return fail(EXIT_PARSE, &e),
    };
    match write_output(&a.output, &format_graph(&g)) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => fail(EXIT_PARSE, &e),
    }
}

fn bench_graph(family: &str, n: usize, seed: u64) -> Result<WeightedGraph, String> {
    match family {
        "grid" => {
            let side = (n as f64).sqrt().round() as usize;
            Ok(gen::grid(side.max(1), side.max(1)))
        }
        "path" => Ok(gen::path(n)),
        "gnm" => Ok(gen::gnm(n, 2 * n, seed)),
        "expander" => Ok(gen::bounded_degree_expander(n, 4, seed)),
        other => Err(format!("unknown bench family '{other}'")),
    }
}

fn cmd_bench(a: BenchArgs) -> ExitCode {
    let mut csv = String::from(
        "n,m,ell,h,algo,outcome,sep_size,n_over_ell,h2_ell_log_term,wall_ms,oracle_deletions\n",
    );
    for &n in &a.ns {
        let g = match bench_graph(&a.family, n, a.seed) {
            Ok(g) => g,
            Err(e) => return fail(EXIT_PARSE, &e),
        };
        for &ell in &a.ells {
            let params = match ProblemParams::new(a.h, ell, a.epsilon, a.seed) {
                Ok(p) => p,
                Err(e) => return fail(EXIT_REGIME, &e.to_string()),
            };
            for &algo in &a.algos {
                let start = Instant::now();
                let (outcome, stats) = match run_algo(algo, &g, params, &BTreeMap::new()) {
                    Ok(r) => r,
                    Err(e) => return fail(EXIT_REGIME, &e),
                };
                let wall = start.elapsed().as_millis();
                let (kind, sep) = match &outcome {
                    SeparatorOutcome::Separator { vertices } => ("separator", vertices.len()),
                    SeparatorOutcome::MinorCertificate { .. } => ("certificate", 0),
                    SeparatorOutcome::Rejected { .. } => ("rejected", 0),
                };
                let nn = g.n() as f64;
                let t1 = nn / ell as f64;
                let t2 = (a.h * a.h * ell) as f64 * (nn + 1.0).log2();
                csv.push_str(&format!(
                    "{},{},{},{},{},{},{},{:.1},{:.1},{},{}\n",
                    g.n(),
                    g.m(),
                    ell,
                    a.h,
                    algo,
                    kind,
                    sep,
                    t1,
                    t2,
                    wall,
                    stats.oracle_deletions
                ));
            }
        }
    }
    match write_output(&a.output, &csv) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => fail(EXIT_PARSE, &e),
    }
}

fn cmd_verify(a: VerifyArgs) -> ExitCode {
    let g = match read_graph(&a.input, a.format) {
        Ok(g) => g,
        Err(e) => return fail(EXIT_PARSE, &e),
    };
    let data = match fs::read_to_string(&a.outcome) {
        Ok(d) => d,
        Err(e) => return fail(EXIT_PARSE, &format!("{}: {e}", a.outcome.display())),
    };
    let out: OutcomeFile = match serde_json::from_str(&data) {
        Ok(o) => o,
        Err(e) => return fail(EXIT_PARSE, &format!("{}: {e}", a.outcome.display())),
    };
    if out.schema != 1 {
        return fail(EXIT_PARSE, &format!("unsupported schema {}", out.schema));
    }
    let (ok, msg) = verify_outcome(&g, &out, a.h);
    let report = serde_json::json!({ "ok": ok, "detail": msg });
    println!("{report}");
    if ok {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(EXIT_VERIFY)
    }
}

fn main() -> ExitCode {
    match Cli::parse().cmd {
        Cmd::Run(a) => cmd_run(a),
        Cmd::Gen(a) => cmd_gen(a),
        Cmd::Bench(a) => cmd_bench(a),
        Cmd::Verify(a) => cmd_verify(a),
    }
}
