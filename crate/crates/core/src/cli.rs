//! Reproducible experiment driver: parses specs, runs the module operations,
//! and emits versioned JSON/CSV reports.

use crate::balance::{balance_of, ZpMorphism};
use crate::cocycle::{
    check_cocycle_axioms, coboundary_from, d1_to_zero, quasimorphism_defect, vertex_fn_from_spec,
    CheckMode, TargetGroup,
};
use crate::expr::Expr;
use crate::filtered::{Element, Filtration, PolySeq};
use crate::finprob::suite;
use crate::gowers::{inner_product, u_norm_naive, u_norm_recursive, Signal};
use crate::group::FiniteAbelianGroup;
use crate::nilmanifold::{
    correlate, is_p_periodic, lift_morphism, orbit_points, NilPoint, Nilsequence, NilsequenceSpec,
};
use crate::report::{merge_config_args, Report};
use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::{json, Value};
use std::io::Write;
use std::path::PathBuf;
use std::time::Instant;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum OutputFormat {
    Json,
    Csv,
}

#[derive(Debug, Parser)]
#[command(
    name = "nillab",
    version,
    about = "Uniformity norms, nilsequences, cocycles, balance and finite probability demos",
    args_override_self = true
)]
pub struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Plain-text key=value config file; command-line flags override it.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output path (stdout when absent).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true, value_enum, default_value_t = OutputFormat::Json)]
    format: OutputFormat,
    /// Escalate warnings (e.g. period mismatches) to errors.
    #[arg(long, global = true)]
    strict: bool,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// U^d norm of a signal on a finite abelian group.
    Gowers(GowersArgs),
    /// Evaluate a nilsequence on a range of integers.
    Nilseq(NilseqArgs),
    /// Correlate a signal with a nilsequence.
    Correlate(CorrelateArgs),
    /// Lift a morphism Z_N → G/Γ to a polynomial sequence and verify.
    Lift(LiftArgs),
    /// Cocycle diagnostics.
    Cocycle {
        #[command(subcommand)]
        sub: CocycleCmd,
    },
    /// Balance sweep of a morphism out of Z_p.
    Balance(BalanceArgs),
    /// Finite-probability approximation suites.
    Finprob {
        #[command(subcommand)]
        sub: FinprobCmd,
    },
    /// Matched quadratic nilsequence demonstration on Z_p.
    InverseDemo(InverseDemoArgs),
}

#[derive(Debug, Args)]
struct GowersArgs {
    /// Group spec, e.g. Z5 or Z4xZ3.
    #[arg(long)]
    group: String,
    /// Signal spec: const:1, char:a=..., quadphase:a=..., or csv:PATH.
    #[arg(long)]
    signal: String,
    #[arg(long)]
    d: usize,
    /// naive | recursive | both.
    #[arg(long, default_value = "both")]
    method: String,
    #[arg(long, default_value_t = 100_000_000)]
    budget: u64,
}

#[derive(Debug, Args)]
struct NilseqArgs {
    /// Path to a nilsequence JSON spec.
    #[arg(long)]
    nilseq: PathBuf,
    #[arg(long, default_value_t = 0)]
    start: i64,
    /// Number of evaluations (defaults to the declared period).
    #[arg(long)]
    count: Option<u64>,
}

#[derive(Debug, Args)]
struct CorrelateArgs {
    #[arg(long)]
    group: String,
    #[arg(long)]
    signal: String,
    #[arg(long)]
    nilseq: PathBuf,
}

#[derive(Debug, Args)]
struct LiftArgs {
    /// Filtration spec: abelian:m={m},deg={k} or heis:lcs.
    #[arg(long)]
    filtration: String,
    /// JSON file with polynomial coefficients (round-trip mode).
    #[arg(long)]
    poly: Option<PathBuf>,
    /// JSON file with morphism point coordinates (direct mode).
    #[arg(long)]
    phi: Option<PathBuf>,
    #[arg(long)]
    period: u64,
}

#[derive(Debug, Subcommand)]
enum CocycleCmd {
    /// Check the automorphism and concatenation axioms.
    Check(CocycleCommon),
    /// Average distance of the cocycle from zero.
    D1(CocycleCommon),
    /// Empirical quasimorphism defect table.
    Defect(DefectArgs),
}

#[derive(Debug, Args)]
struct CocycleCommon {
    #[arg(long)]
    group: String,
    /// Cocycle degree k (cubes have dimension k+1).
    #[arg(long)]
    k: i64,
    /// circle or z:{m}.
    #[arg(long, default_value = "circle")]
    target: String,
    /// Vertex function: linear:a={a} or random.
    #[arg(long, default_value = "linear:a=1")]
    g: String,
    /// enumerate or sample.
    #[arg(long, default_value = "enumerate")]
    mode: String,
    #[arg(long)]
    samples: Option<u32>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, default_value_t = 100_000_000)]
    budget: u64,
}

#[derive(Debug, Args)]
struct DefectArgs {
    #[command(flatten)]
    common: CocycleCommon,
    /// Comma-separated δ grid.
    #[arg(long, default_value = "0.5,0.1,0.01")]
    deltas: String,
}

#[derive(Debug, Args)]
struct BalanceArgs {
    /// Morphism spec: linear:a={a},p={p} or const:t={t},p={p}.
    #[arg(long)]
    phi: String,
    /// Descending comma-separated b grid with 1/b ≤ 3.
    #[arg(long)]
    grid: String,
    #[arg(long, default_value_t = 10_000)]
    samples: usize,
    #[arg(long)]
    seed: u64,
    /// Truncation index R of the test-function family.
    #[arg(long, default_value_t = 8)]
    truncation: usize,
}

#[derive(Debug, Subcommand)]
enum FinprobCmd {
    /// Run one approximation-lemma suite on seeded random instances.
    Demo(FinprobDemoArgs),
}

#[derive(Debug, Args)]
struct FinprobDemoArgs {
    /// B1 (level set), B2 (conditionally independent intersection), or
    /// B3 (invariant approximation).
    #[arg(long)]
    lemma: String,
    #[arg(long)]
    seed: u64,
    #[arg(long, default_value_t = 1000)]
    instances: u64,
}

#[derive(Debug, Args)]
struct InverseDemoArgs {
    #[arg(long, default_value_t = 31)]
    p: u64,
    /// Quadratic coefficient of the matched phase.
    #[arg(long, default_value_t = 1)]
    a: i64,
}

fn parse_signal(group: &FiniteAbelianGroup, spec: &str) -> Result<Signal> {
    if let Some(path) = spec.strip_prefix("csv:") {
        let file = std::fs::File::open(path).with_context(|| format!("open {path}"))?;
        return Ok(Signal::from_csv(
            group.clone(),
            std::io::BufReader::new(file),
        )?);
    }
    Ok(Signal::parse_generator(group.clone(), spec)?)
}

fn parse_f64_list(s: &str) -> Result<Vec<f64>> {
    s.split(',')
        .map(|x| {
            x.trim()
                .parse::<f64>()
                .map_err(|_| anyhow!("bad number `{x}`"))
        })
        .collect()
}

fn complex_json(z: num::complex::Complex64) -> Value {
    json!({"re": z.re, "im": z.im})
}

fn load_nilsequence(path: &PathBuf) -> Result<(Nilsequence, Value)> {
    let text = std::fs::read_to_string(path).with_context(|| format!("open {path:?}"))?;
    let spec: NilsequenceSpec =
        serde_json::from_str(&text).context("parse nilsequence spec")?;
    let echo = serde_json::to_value(&spec)?;
    Ok((spec.build()?, echo))
}

fn load_coeff_file(path: &PathBuf) -> Result<Vec<Vec<String>>> {
    let text = std::fs::read_to_string(path).with_context(|| format!("open {path:?}"))?;
    Ok(serde_json::from_str(&text).context("parse coordinate lists")?)
}

fn parse_mode(mode: &str, samples: Option<u32>, seed: Option<u64>) -> Result<(CheckMode, Option<u64>)> {
    match mode {
        "enumerate" => Ok((CheckMode::Enumerate, seed)),
        "sample" => {
            let seed = seed.ok_or_else(|| anyhow!("--seed is mandatory for sampled runs"))?;
            Ok((
                CheckMode::Sample {
                    count: samples.unwrap_or(10_000),
                },
                Some(seed),
            ))
        }
        other => bail!("unknown mode `{other}` (expected enumerate|sample)"),
    }
}

fn run_command(cli: &Cli) -> Result<Report> {
    match &cli.command {
        Command::Gowers(a) => {
            let group = FiniteAbelianGroup::parse(&a.group)?;
            let f = parse_signal(&group, &a.signal)?;
            let mut results = serde_json::Map::new();
            let naive = match a.method.as_str() {
                "naive" | "both" => Some(u_norm_naive(&f, a.d, a.budget)?),
                _ => None,
            };
            let recursive = match a.method.as_str() {
                "recursive" | "both" if a.d >= 2 => Some(u_norm_recursive(&f, a.d)?),
                "recursive" => bail!("the recursive evaluator needs d ≥ 2"),
                _ => None,
            };
            if let Some(v) = naive {
                results.insert(
                    "naive".into(),
                    json!({"value": v, "budget": a.budget, "tolerance": 1e-9}),
                );
            }
            if let Some(v) = recursive {
                results.insert(
                    "recursive".into(),
                    json!({"value": v, "tolerance": 1e-9}),
                );
            }
            if let (Some(x), Some(y)) = (naive, recursive) {
                results.insert("evaluator_gap".into(), json!((x - y).abs()));
            }
            results.insert(
                "norm".into(),
                json!(naive.or(recursive).expect("at least one evaluator ran")),
            );
            Ok(Report::new(
                "gowers",
                json!({"group": a.group, "signal": a.signal, "d": a.d, "method": a.method}),
                None,
                Value::Object(results),
            ))
        }
        Command::Nilseq(a) => {
            let (ns, echo) = load_nilsequence(&a.nilseq)?;
            let count = a.count.unwrap_or(ns.period());
            let table: Vec<Value> = (0..count as i64)
                .map(|i| {
                    let n = a.start + i;
                    let v = ns.eval(n);
                    json!({"n": n, "re": v.re, "im": v.im})
                })
                .collect();
            Ok(Report::new(
                "nilseq",
                json!({"nilseq": echo, "start": a.start, "count": count}),
                None,
                json!({"values": table}),
            ))
        }
        Command::Correlate(a) => {
            let group = FiniteAbelianGroup::parse(&a.group)?;
            let f = parse_signal(&group, &a.signal)?;
            let (ns, echo) = load_nilsequence(&a.nilseq)?;
            let c = correlate(&f, &ns, cli.strict)?;
            Ok(Report::new(
                "correlate",
                json!({"group": a.group, "signal": a.signal, "nilseq": echo}),
                None,
                json!({
                    "correlation": complex_json(c.value),
                    "modulus": c.value.norm(),
                    "period_ok": c.period_ok,
                    "points": group.order(),
                }),
            ))
        }
        Command::Lift(a) => {
            let filt = Filtration::parse(&a.filtration)?;
            let carrier = filt.carrier();
            let (phi, source): (Vec<NilPoint>, Value) = match (&a.poly, &a.phi) {
                (Some(path), None) => {
                    let coords = load_coeff_file(path)?;
                    let coeffs: Vec<Element> = coords
                        .iter()
                        .map(|c| {
                            let parsed: std::result::Result<Vec<_>, _> =
                                c.iter().map(|s| crate::rat::parse_ratio(s)).collect();
                            Ok(carrier.from_coords(parsed.map_err(|e| anyhow!("{e}"))?)?)
                        })
                        .collect::<Result<_>>()?;
                    let poly = PolySeq::new(filt.clone(), coeffs)?;
                    if !is_p_periodic(&poly, a.period, 2 * a.period as u32) {
                        bail!("input sequence is not {}-periodic mod Γ", a.period);
                    }
                    (orbit_points(&poly, a.period), json!({"poly": coords}))
                }
                (None, Some(path)) => {
                    let coords = load_coeff_file(path)?;
                    let phi: Vec<NilPoint> = coords
                        .iter()
                        .map(|c| {
                            let parsed: std::result::Result<Vec<_>, _> =
                                c.iter().map(|s| crate::rat::parse_ratio(s)).collect();
                            NilPoint::new(parsed.map_err(|e| anyhow!("{e}"))?)
                                .map_err(|e| anyhow!("{e}"))
                        })
                        .collect::<Result<_>>()?;
                    if phi.len() as u64 != a.period {
                        bail!("φ table length {} ≠ period {}", phi.len(), a.period);
                    }
                    (phi, json!({"phi": coords}))
                }
                _ => bail!("exactly one of --poly / --phi is required"),
            };
            let lifted = lift_morphism(&phi, &filt)?;
            let coeff_strings: Vec<Vec<String>> = lifted
                .coeffs()
                .iter()
                .map(Element::coord_strings)
                .collect();
            let periodic = is_p_periodic(&lifted, a.period, 2 * a.period as u32);
            Ok(Report::new(
                "lift",
                json!({"filtration": a.filtration, "period": a.period, "input": source}),
                None,
                json!({
                    "coefficients": coeff_strings,
                    "round_trip_window": 2 * a.period,
                    "round_trip_ok": true,
                    "p_periodic": periodic,
                }),
            ))
        }
        Command::Cocycle { sub } => run_cocycle(sub),
        Command::Balance(a) => {
            let phi = ZpMorphism::parse(&a.phi)?;
            let mut grid = parse_f64_list(&a.grid)?;
            grid.sort_by(|x, y| y.partial_cmp(x).expect("finite grid"));
            let report = balance_of(&phi, &grid, a.samples, a.seed, a.truncation)?;
            let rows: Vec<Value> = report
                .rows
                .iter()
                .map(|r| json!({"b": r.b, "n": r.n, "d": r.d, "pass": r.pass}))
                .collect();
            Ok(Report::new(
                "balance",
                json!({"phi": a.phi, "grid": grid, "samples": a.samples, "truncation": a.truncation}),
                Some(a.seed),
                json!({
                    "table": rows,
                    "smallest_passing_b": report.smallest_passing_b,
                    "samples": report.samples,
                    "truncation_index": report.truncation_index,
                }),
            ))
        }
        Command::Finprob { sub } => {
            let FinprobCmd::Demo(a) = sub;
            let suite_report = match a.lemma.as_str() {
                "B1" | "b1" => suite::run_level_set(a.instances, a.seed, 64),
                "B2" | "b2" => suite::run_ci_intersection(a.instances, a.seed, 8),
                "B3" | "b3" => suite::run_invariant(a.instances, a.seed, 32),
                other => bail!("unknown lemma `{other}` (expected B1|B2|B3)"),
            };
            Ok(Report::new(
                "finprob",
                json!({"lemma": a.lemma, "instances": a.instances}),
                Some(a.seed),
                serde_json::to_value(&suite_report)?,
            ))
        }
        Command::InverseDemo(a) => run_inverse_demo(a),
    }
}

fn run_cocycle(sub: &CocycleCmd) -> Result<Report> {
    let common = match sub {
        CocycleCmd::Check(c) | CocycleCmd::D1(c) => c,
        CocycleCmd::Defect(d) => &d.common,
    };
    let group = FiniteAbelianGroup::parse(&common.group)?;
    let target = TargetGroup::parse(&common.target)?;
    let (mode, seed) = parse_mode(&common.mode, common.samples, common.seed)?;
    let g = vertex_fn_from_spec(&group, target, &common.g, seed.unwrap_or(0))?;
    let params = json!({
        "group": common.group,
        "k": common.k,
        "target": common.target,
        "g": common.g,
        "mode": common.mode,
        "samples": common.samples,
    });
    match sub {
        CocycleCmd::Check(_) => {
            let rho = coboundary_from(group, target, g, common.k)?;
            let report = check_cocycle_axioms(&rho, mode, seed.unwrap_or(0), common.budget)?;
            Ok(Report::new(
                "cocycle check",
                params,
                seed,
                serde_json::to_value(&report)?,
            ))
        }
        CocycleCmd::D1(_) => {
            let rho = coboundary_from(group, target, g, common.k)?;
            let value = d1_to_zero(&rho, mode, seed.unwrap_or(0), common.budget)?;
            Ok(Report::new(
                "cocycle d1",
                params,
                seed,
                json!({"d1": value, "mode": common.mode}),
            ))
        }
        CocycleCmd::Defect(d) => {
            if common.k < 0 {
                bail!("defect needs k ≥ 0");
            }
            let deltas = parse_f64_list(&d.deltas)?;
            let rows = quasimorphism_defect(
                &group,
                target,
                &*g,
                common.k as usize,
                &deltas,
                mode,
                seed.unwrap_or(0),
                common.budget,
            )?;
            let table: Vec<Value> = rows
                .iter()
                .map(|r| {
                    json!({
                        "delta": r.delta,
                        "failure_fraction": r.failure_fraction,
                        "quasi": r.quasi,
                        "samples": r.samples,
                    })
                })
                .collect();
            Ok(Report::new(
                "cocycle defect",
                params,
                seed,
                json!({"table": table}),
            ))
        }
    }
}

fn run_inverse_demo(a: &InverseDemoArgs) -> Result<Report> {
    let p = a.p;
    let group = FiniteAbelianGroup::cyclic(p);
    let f = Signal::quad_phase(group.clone(), a.a)?;
    // Taylor form of a·n²/p: coefficients (0, a/p, 2a/p).
    let filt = Filtration::abelian(1, 2);
    let poly = PolySeq::new(
        filt,
        vec![
            Element::Abelian(vec![crate::rat::int(0)]),
            Element::Abelian(vec![crate::rat::ratio(a.a, p as i64)]),
            Element::Abelian(vec![crate::rat::ratio(2 * a.a, p as i64)]),
        ],
    )?;
    let ns = Nilsequence::new(poly, Expr::parse("e(t0)")?, Some(7.0), p)?;
    let corr = correlate(&f, &ns, true)?;
    let u3 = u_norm_recursive(&f, 3)?;
    let l2_sq = inner_product(&f, &f)?.re;
    let chain_ok = corr.value.re >= u3.powi(8) - 1e-9 && (corr.value.re - l2_sq).abs() < 1e-9;
    let delta_table: Vec<Value> = (1..=10)
        .map(|i| {
            let delta = i as f64 / 10.0;
            let threshold = delta.powi(8) / 2.0;
            json!({
                "delta": delta,
                "threshold": threshold,
                "pass": corr.value.norm() >= threshold,
            })
        })
        .collect();
    Ok(Report::new(
        "inverse-demo",
        json!({"p": p, "a": a.a, "k": 2}),
        None,
        json!({
            "correlation": complex_json(corr.value),
            "u3": {"value": u3, "tolerance": 1e-9},
            "l2_sq": l2_sq,
            "chain_ok": chain_ok,
            "period_ok": corr.period_ok,
            "delta_table": delta_table,
        }),
    ))
}

/// Parses argv (with config expansion), runs the experiment, and returns the
/// rendered report together with the chosen output path.
pub fn run(args: Vec<String>) -> Result<(String, Option<PathBuf>)> {
    // A --config flag anywhere triggers pre-expansion.
    let mut args = args;
    if let Some(pos) = args.iter().position(|a| a == "--config") {
        if pos + 1 >= args.len() {
            bail!("--config needs a path");
        }
        let path = PathBuf::from(args[pos + 1].clone());
        args.drain(pos..=pos + 1);
        let pairs = crate::report::load_config(&path)
            .with_context(|| format!("read config {path:?}"))?;
        args = merge_config_args(args, &pairs);
    }
    let cli = Cli::try_parse_from(&args)?;
    let start = Instant::now();
    let mut report = run_command(&cli)?;
    report.wall_time_ms = start.elapsed().as_secs_f64() * 1000.0;
    let rendered = match cli.format {
        OutputFormat::Json => report.to_json(),
        OutputFormat::Csv => report.to_csv(),
    };
    Ok((rendered, cli.out))
}

/// Binary entry point.
pub fn main_from_env() -> i32 {
    let args: Vec<String> = std::env::args().collect();
    match run(args) {
        Ok((rendered, out)) => {
            if let Some(path) = out {
                if let Err(e) = std::fs::write(&path, rendered) {
                    eprintln!("error: cannot write {path:?}: {e}");
                    return 1;
                }
            } else {
                let mut stdout = std::io::stdout().lock();
                let _ = stdout.write_all(rendered.as_bytes());
            }
            0
        }
        Err(e) => {
            if let Some(clap_err) = e.downcast_ref::<clap::Error>() {
                let _ = clap_err.print();
                return clap_err.exit_code() as i32 & 0xff;
            }
            eprintln!("error: {e:#}");
            2
        }
    }
}
