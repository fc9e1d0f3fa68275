//! `bx`: generate instances, run mechanisms, fuzz for manipulations, and sweep ratios.
//!
//! Exit codes: 0 success, 2 bound violation or manipulation found, 1 usage or IO error.

pub mod genspec;

use bx_core::instances::FORMAT;
use bx_core::mechanisms::{lambda_profile, run_mechanism, MechanismSpec, DEFAULT_NODE_CAP};
use bx_core::rational::{fmt_rational, parse_rational, to_decimal};
use bx_core::verification::{
    fuzz_truthfulness_nodes, fuzz_truthfulness_wishlists, graph_utility, ratio_report, FuzzConfig, ManipulationFinding,
    RatioReport,
};
use bx_core::{BxError, CycleGraph, InstanceBundle, Rational, Utility};
use clap::{Parser, Subcommand, ValueEnum};
use genspec::{bind_mechanism, parse_lambda, GenSpec, Generated};
use rayon::prelude::*;
use serde_json::{json, Value};
use std::collections::BTreeMap;
use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_FOUND: i32 = 2;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Core(#[from] BxError),
}

type CliResult<T> = std::result::Result<T, CliError>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Json,
    Csv,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Space {
    Nodes,
    Wishes,
    Both,
}

#[derive(Debug, Parser)]
#[command(name = "bx", version, about = "Truthful bounded-length barter exchange toolkit")]
pub struct Cli {
    /// Seed for fuzz sampling and randomized mechanisms.
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    /// Largest node count the exact oracle will attempt.
    #[arg(long, global = true, default_value_t = DEFAULT_NODE_CAP)]
    pub oracle_cap: usize,
    /// Output file; stdout when absent.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[arg(long, global = true, value_enum)]
    pub format: Option<Format>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Write a bx-v1 instance file from a generator spec such as `comb:h=2,v=3`.
    Gen { spec: String },
    /// Run one mechanism on an instance file or generator spec.
    Solve { instance: String, mechanism: String },
    /// Search for profitable single-agent misreports.
    Fuzz {
        instance: String,
        mechanism: String,
        /// Sampled strategies per agent when enumeration is too large.
        #[arg(long, default_value_t = 64)]
        budget: usize,
        #[arg(long, value_enum, default_value_t = Space::Both)]
        space: Space,
    },
    /// Measure approximation ratios over a generator family.
    Sweep {
        family: String,
        #[arg(required = true)]
        mechanisms: Vec<String>,
        /// Replaces every mechanism's claimed bound.
        #[arg(long)]
        bound: Option<String>,
    },
    /// Print the quantities derived from a length function such as `1,9/10`.
    ProfileLambda { lambda: String },
}

/// Parses `args` and runs the command; returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    match execute(&cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            EXIT_USAGE
        }
    }
}

pub fn execute(cli: &Cli) -> CliResult<i32> {
    match &cli.command {
        Command::Gen { spec } => cmd_gen(cli, spec),
        Command::Solve { instance, mechanism } => cmd_solve(cli, instance, mechanism),
        Command::Fuzz { instance, mechanism, budget, space } => cmd_fuzz(cli, instance, mechanism, *budget, *space),
        Command::Sweep { family, mechanisms, bound } => cmd_sweep(cli, family, mechanisms, bound.as_deref()),
        Command::ProfileLambda { lambda } => cmd_profile(cli, lambda),
    }
}

fn emit(cli: &Cli, text: &str) -> CliResult<()> {
    match &cli.out {
        Some(path) => std::fs::write(path, text)?,
        None => std::io::stdout().write_all(text.as_bytes())?,
    }
    Ok(())
}

/// An existing file is loaded as bx-v1; anything else is parsed as a generator spec.
pub fn load_instances(arg: &str) -> CliResult<Vec<Generated>> {
    let path = Path::new(arg);
    if path.is_file() {
        let text = std::fs::read_to_string(path)?;
        let bundle = InstanceBundle::from_json_str(&text)?;
        return Ok(vec![Generated { params: BTreeMap::new(), bundle }]);
    }
    if !arg.contains(':') && (arg.contains('/') || arg.ends_with(".json")) {
        return Err(CliError::Usage(format!("no such instance file: {arg}")));
    }
    Ok(GenSpec::parse(arg)?.generate()?)
}

fn cmd_gen(cli: &Cli, spec: &str) -> CliResult<i32> {
    let mut all = GenSpec::parse(spec)?.generate()?;
    if all.len() != 1 {
        return Err(CliError::Usage(format!("gen writes one instance, but {spec:?} expands to {}", all.len())));
    }
    let b = all.remove(0).bundle;
    let nodes = b.graph()?.len();
    emit(cli, &b.to_canonical_string())?;
    let summary = format!("{}: {} agents, {} cycles ({FORMAT})", b.name, b.n, nodes);
    if cli.out.is_some() {
        println!("{summary}");
    } else {
        eprintln!("{summary}");
    }
    Ok(EXIT_OK)
}

fn utility_str(u: Utility) -> String {
    u.to_string()
}

fn ratio_or_warning(
    name: &str,
    mech: &str,
    g: &CycleGraph,
    set: &bx_core::IndependentSet,
    bound: Option<Rational>,
    cap: usize,
) -> CliResult<Result<RatioReport, String>> {
    match ratio_report(name, mech, g, set, bound, cap) {
        Ok(r) => Ok(Ok(r)),
        Err(e @ BxError::OracleCap { .. }) => Ok(Err(format!("ratio skipped: {e}"))),
        Err(e) => Err(e.into()),
    }
}

fn cmd_solve(cli: &Cli, instance: &str, mechanism: &str) -> CliResult<i32> {
    let all = load_instances(instance)?;
    let mut reports = Vec::new();
    let mut rows = Vec::new();
    let mut violated = false;
    for inst in &all {
        let (value, ratio) = solve_one(cli, inst, mechanism)?;
        violated |= ratio.as_ref().is_some_and(|r| !r.within_bound);
        rows.push(match &ratio {
            Some(r) => ratio_cells(r),
            None => capped_cells(&inst.bundle.name, value["mechanism"].as_str().unwrap_or_default()),
        });
        reports.push(value);
    }
    let text = match cli.format.unwrap_or(Format::Json) {
        Format::Json => {
            let v = if reports.len() == 1 { reports.remove(0) } else { Value::Array(reports) };
            serde_json::to_string_pretty(&v).expect("json values serialize") + "\n"
        }
        Format::Csv => to_csv(&CSV_COLUMNS, &rows)?,
    };
    emit(cli, &text)?;
    Ok(if violated { EXIT_FOUND } else { EXIT_OK })
}

fn solve_one(cli: &Cli, inst: &Generated, mechanism: &str) -> CliResult<(Value, Option<RatioReport>)> {
    let b = &inst.bundle;
    let mech = bind_mechanism(mechanism, &inst.params)?;
    let spec = MechanismSpec::parse(&mech)?;
    let g = b.graph()?;
    let mut warnings = Vec::new();
    let (exchange, welfare, utilities, stats, set) = match b.wishes() {
        Some(w) if b.node_order.is_none() || matches!(spec, MechanismSpec::Randomized { .. }) => {
            let r = run_mechanism(&spec, w, w, &b.lambda, cli.seed, cli.oracle_cap)?;
            let set =
                g.from_exchange(&r.exchange).ok_or_else(|| CliError::Usage("exchange is not in the graph".into()))?;
            let utils: Vec<Value> =
                r.utilities.iter().map(|(a, u)| json!({"agent": a.0, "utility": utility_str(*u)})).collect();
            (r.exchange, r.welfare, utils, r.stats, set)
        }
        _ => {
            // direct graphs, and wish lists with a pinned node order, run on the graph itself
            let alg = spec.algorithm(&b.lambda, cli.oracle_cap)?;
            let run = alg.run(&g)?;
            let ex = g.to_exchange(&run.set)?;
            let utils: Vec<Value> = (1..=b.n as u32)
                .map(|a| json!({"agent": a, "utility": utility_str(graph_utility(&g, &run.set, bx_core::AgentId(a)))}))
                .collect();
            (ex, g.weight(&run.set), utils, run.stats, run.set)
        }
    };
    let bound = match spec {
        MechanismSpec::Randomized { .. } => None,
        _ => spec.claimed_ratio(&b.lambda),
    };
    let ratio = match ratio_or_warning(&b.name, &mech, &g, &set, bound, cli.oracle_cap)? {
        Ok(r) => Some(r),
        Err(w) => {
            eprintln!("warning: {w}");
            warnings.push(w);
            None
        }
    };
    let v = json!({
        "instance": b.name,
        "mechanism": mech,
        "exchange": exchange.cycles().iter().map(|c| c.ids()).collect::<Vec<_>>(),
        "welfare": fmt_rational(&welfare),
        "utilities": utilities,
        "stats": {"iterations": stats.iterations, "rule_firings": stats.rule_firings},
        "ratio": ratio.as_ref().map(RatioReport::to_json),
        "warnings": warnings,
    });
    Ok((v, ratio))
}

fn finding_line(instance: &str, mechanism: &str, space: &str, f: &ManipulationFinding) -> String {
    let mut v = f.to_json();
    v["instance"] = json!(instance);
    v["mechanism"] = json!(mechanism);
    v["space"] = json!(space);
    serde_json::to_string(&v).expect("json values serialize")
}

fn cmd_fuzz(cli: &Cli, instance: &str, mechanism: &str, budget: usize, space: Space) -> CliResult<i32> {
    let all = load_instances(instance)?;
    let cfg = FuzzConfig { budget, seed: cli.seed, ..FuzzConfig::default() };
    let per_instance: Vec<CliResult<Vec<String>>> = all
        .par_iter()
        .map(|inst| {
            let b = &inst.bundle;
            let mech = bind_mechanism(mechanism, &inst.params)?;
            let alg = MechanismSpec::parse(&mech)?.algorithm(&b.lambda, cli.oracle_cap)?;
            let mut lines = Vec::new();
            if matches!(space, Space::Nodes | Space::Both) {
                for f in fuzz_truthfulness_nodes(alg.as_ref(), &b.graph()?, &cfg)? {
                    lines.push(finding_line(&b.name, &mech, "nodes", &f));
                }
            }
            if matches!(space, Space::Wishes | Space::Both) {
                if let Some(w) = b.wishes() {
                    for f in fuzz_truthfulness_wishlists(alg.as_ref(), w, &b.lambda, &cfg)? {
                        lines.push(finding_line(&b.name, &mech, "wishes", &f));
                    }
                }
            }
            Ok(lines)
        })
        .collect();
    let mut text = String::new();
    let mut count = 0;
    for lines in per_instance {
        for l in lines? {
            count += 1;
            text.push_str(&l);
            text.push('\n');
        }
    }
    emit(cli, &text)?;
    eprintln!("{} instance(s), {count} finding(s)", all.len());
    Ok(if count > 0 { EXIT_FOUND } else { EXIT_OK })
}

pub const CSV_COLUMNS: [&str; 8] =
    ["instance", "mechanism", "weight", "oracle", "ratio", "bound", "within_bound", "ratio_decimal"];

fn to_csv(header: &[&str], rows: &[Vec<String>]) -> CliResult<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header).map_err(std::io::Error::from)?;
    for r in rows {
        w.write_record(r).map_err(std::io::Error::from)?;
    }
    let bytes = w.into_inner().map_err(|e| e.into_error())?;
    Ok(String::from_utf8(bytes).expect("csv of utf-8 fields is utf-8"))
}

// the decimal column is display-only
fn ratio_cells(r: &RatioReport) -> Vec<String> {
    let decimal = match r.ratio {
        bx_core::Ratio::Finite(x) => to_decimal(&x, 6),
        bx_core::Ratio::Infinite => "inf".into(),
    };
    vec![
        r.instance.clone(),
        r.mechanism.clone(),
        fmt_rational(&r.mechanism_weight),
        fmt_rational(&r.oracle_weight),
        r.ratio.to_string(),
        r.bound.map(|b| fmt_rational(&b)).unwrap_or_default(),
        r.within_bound.to_string(),
        decimal,
    ]
}

fn capped_cells(instance: &str, mechanism: &str) -> Vec<String> {
    let mut row = vec![instance.to_string(), mechanism.to_string()];
    row.resize(CSV_COLUMNS.len(), String::new());
    row
}

enum SweepRow {
    Measured(RatioReport),
    Capped { instance: String, mechanism: String, warning: String },
}

fn cmd_sweep(cli: &Cli, family: &str, mechanisms: &[String], bound: Option<&str>) -> CliResult<i32> {
    let all = load_instances(family)?;
    let bound = bound.map(parse_rational).transpose()?;
    let cells: Vec<(usize, usize)> = (0..all.len()).flat_map(|i| (0..mechanisms.len()).map(move |m| (i, m))).collect();
    let rows: Vec<CliResult<SweepRow>> = cells
        .par_iter()
        .map(|&(i, m)| {
            let inst = &all[i];
            let b = &inst.bundle;
            let mech = bind_mechanism(&mechanisms[m], &inst.params)?;
            let spec = MechanismSpec::parse(&mech)?;
            let g = b.graph()?;
            let set = spec.algorithm(&b.lambda, cli.oracle_cap)?.run(&g)?.set;
            let claimed = bound.or_else(|| spec.claimed_ratio(&b.lambda));
            Ok(match ratio_or_warning(&b.name, &mech, &g, &set, claimed, cli.oracle_cap)? {
                Ok(r) => SweepRow::Measured(r),
                Err(warning) => SweepRow::Capped { instance: b.name.clone(), mechanism: mech, warning },
            })
        })
        .collect();
    let mut violated = false;
    let format = cli.format.unwrap_or(Format::Csv);
    let mut text = String::new();
    let mut table = Vec::new();
    // rows keep (instance, mechanism) expansion order
    for row in rows {
        match row? {
            SweepRow::Measured(r) => {
                violated |= !r.within_bound;
                match format {
                    Format::Csv => table.push(ratio_cells(&r)),
                    Format::Json => {
                        text.push_str(&serde_json::to_string(&r.to_json()).expect("json values serialize"));
                        text.push('\n');
                    }
                }
            }
            SweepRow::Capped { instance, mechanism, warning } => {
                eprintln!("warning: {instance} {mechanism}: {warning}");
                match format {
                    Format::Csv => table.push(capped_cells(&instance, &mechanism)),
                    Format::Json => {
                        let v = json!({"instance": instance, "mechanism": mechanism, "warning": warning});
                        text.push_str(&serde_json::to_string(&v).expect("json values serialize"));
                        text.push('\n');
                    }
                }
            }
        }
    }
    if format == Format::Csv {
        text = to_csv(&CSV_COLUMNS, &table)?;
    }
    emit(cli, &text)?;
    Ok(if violated { EXIT_FOUND } else { EXIT_OK })
}

fn cmd_profile(cli: &Cli, lambda: &str) -> CliResult<i32> {
    let lam = parse_lambda(lambda, None)?;
    let p = lambda_profile(&lam);
    let opt = |r: Option<Rational>| r.map(|x| fmt_rational(&x));
    let v = json!({
        "k": lam.k(),
        "lambda": lam.values().iter().map(fmt_rational).collect::<Vec<_>>(),
        "uniform": lam.is_uniform(),
        "ell_star": p.ell_star,
        "levels": p.levels,
        "classes": p.classes.iter().map(|(l, c)| (l.to_string(), json!(c))).collect::<serde_json::Map<_, _>>(),
        "rho": opt(p.rho),
        "rho1": opt(p.rho1),
        "rho2": opt(p.rho2),
        "rho_exceeds_k_minus_1": p.rho_exceeds_k_minus_1(),
        "tight_predicate": p.tight_predicate(),
    });
    let text = match cli.format.unwrap_or(Format::Json) {
        Format::Json => serde_json::to_string_pretty(&v).expect("json values serialize") + "\n",
        Format::Csv => {
            let rows: Vec<Vec<String>> = v
                .as_object()
                .expect("profile is an object")
                .iter()
                .map(|(k, val)| {
                    let cell = match val {
                        Value::String(x) => x.clone(),
                        Value::Null => String::new(),
                        other => other.to_string(),
                    };
                    vec![k.clone(), cell]
                })
                .collect();
            to_csv(&["key", "value"], &rows)?
        }
    };
    emit(cli, &text)?;
    Ok(EXIT_OK)
}
