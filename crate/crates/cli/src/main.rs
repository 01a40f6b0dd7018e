//! `transference`: command-line front end to transfer-core.
//!
//! Exit status: 0 success, 1 a verification check failed, 2 input error,
//! 3 budget error, 4 internal error.

mod io;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::{json, Value};

use transfer_core::constants::{BellmanProblem, ConstantQuery};
use transfer_core::dag::{ConstructExpr, DEFAULT_LAMBDA_HOM};
use transfer_core::martingale::{
    compile_to_circle, log_staircase, power_staircase, validate_membership, MartingaleTree, MembershipDomain,
    Schedule,
};
use transfer_core::measure::{DistFunctional, IntervalQuery, MonotoneMap, StepFunction};
use transfer_core::search::{self, objective, SearchConfig, SearchReport, Target};
use transfer_core::verify::{self, JnParams, RhParams, RhReference, VerifyReport};
use transfer_core::{Error, Result};

use io::{Input, Output};

#[derive(Parser, Debug)]
#[command(name = "transference", version, about = "BMO_p and A_p computations on intervals, lines and circles")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    flags: Flags,
}

#[derive(clap::Args, Debug, Clone)]
struct Flags {
    /// Exponent p (BMO_p, A_p; `inf` selects A_inf for `ap`).
    #[arg(long, global = true)]
    p: Option<f64>,
    /// Reverse Hölder exponent.
    #[arg(long, global = true)]
    q: Option<f64>,
    #[arg(long, global = true)]
    eps: Option<f64>,
    /// A_p bound, or the exponent constant for `expint`.
    #[arg(long = "C", global = true, allow_hyphen_values = true)]
    c: Option<f64>,
    #[arg(long, global = true)]
    lambda: Option<f64>,
    #[arg(long = "lambda-hom", global = true)]
    lambda_hom: Option<f64>,
    /// Geometric levels K of homogenization.
    #[arg(long, global = true)]
    levels: Option<usize>,
    /// Staircase depth N (largest depth tried for verify-jn).
    #[arg(long, global = true)]
    depth: Option<usize>,
    #[arg(long, global = true)]
    alpha: Option<f64>,
    #[arg(long, global = true)]
    tol: Option<f64>,
    #[arg(long = "r-long", global = true)]
    r_long: Option<usize>,
    #[arg(long = "max-periods", global = true)]
    max_periods: Option<usize>,
    #[arg(long, global = true)]
    certify: bool,
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Input file; `glue` takes two.
    #[arg(long = "in", global = true)]
    input: Vec<PathBuf>,
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true, value_enum, default_value_t = Format::Json)]
    format: Format,
    /// Pair optimizer: grid-refine, breakpoints or dense.
    #[arg(long, global = true)]
    strategy: Option<String>,
    /// Grid points per end fraction.
    #[arg(long, global = true)]
    grid: Option<usize>,
    /// Query interval ends (default: the whole carrier).
    #[arg(long, global = true, allow_hyphen_values = true)]
    left: Option<f64>,
    #[arg(long, global = true, allow_hyphen_values = true)]
    right: Option<f64>,
    /// Constant to print for `constants`.
    #[arg(long, global = true, value_enum)]
    which: Option<Which>,
    #[arg(long, global = true)]
    delta: Option<f64>,
    /// Target for the exponential integral in verify-jn.
    #[arg(long, global = true)]
    m: Option<f64>,
    /// Corpus size for randomized suites.
    #[arg(long, global = true)]
    count: Option<usize>,
    /// Truncation level for `monotone` (used when no map file is given).
    #[arg(long, global = true, allow_hyphen_values = true)]
    truncate: Option<f64>,
    /// Flatten the built expression to a step function with at most this many pieces.
    #[arg(long, global = true)]
    materialize: Option<usize>,
    /// Reference Reverse Hölder value for verify-rh (with --p, --C, --q).
    #[arg(long = "r-ref", global = true)]
    r_ref: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Json,
    Csv,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Which {
    C3p,
    LpEquiv,
    JnWeakEnvelope,
    ClassicJn,
    BellmanLpMoment,
    BellmanWeakType,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Distribution and averages over an interval.
    Eval,
    /// BMO_p seminorm (circle arcs for circle targets).
    Norm,
    /// A_p constant, or A_inf with `--p inf`.
    Ap,
    /// Weak-type tail mass over an interval.
    Weak,
    /// Integral of e^{C f} over an interval.
    Expint,
    /// Reverse Hölder ratio over an interval.
    Rh,
    /// Homogenization expression of the input.
    Homogenize,
    /// Gluing expression of two inputs.
    Glue,
    /// Circle expression compiled from a measure-valued martingale.
    Compile,
    /// Hull membership report of a martingale.
    Validate,
    /// Log staircase, or the power staircase when --alpha is given.
    Staircase,
    /// Monotone rearrangement.
    Rearrange,
    /// Composition with a monotone map (or truncation) and the norms before and after.
    Monotone,
    Constants,
    #[command(name = "verify-jn")]
    VerifyJn,
    #[command(name = "verify-weak")]
    VerifyWeak,
    #[command(name = "verify-lp")]
    VerifyLp,
    #[command(name = "verify-rh")]
    VerifyRh,
    #[command(name = "verify-monotone")]
    VerifyMonotone,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("transference: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn search_config(f: &Flags) -> Result<SearchConfig> {
    let mut cfg = SearchConfig::default();
    if let Some(v) = f.tol {
        cfg.tol = v;
    }
    if let Some(v) = f.r_long {
        cfg.r_long = v;
    }
    if let Some(v) = f.max_periods {
        cfg.max_periods = v;
    }
    if let Some(v) = f.threads {
        cfg.threads = v;
    }
    if let Some(v) = f.seed {
        cfg.seed = v;
    }
    if let Some(v) = &f.strategy {
        cfg.strategy = v.clone();
    }
    if let Some(v) = f.grid {
        cfg.grid = v;
    }
    cfg.certify = f.certify;
    cfg.validate()?;
    Ok(cfg)
}

fn need<T: Copy>(v: Option<T>, flag: &str) -> Result<T> {
    v.ok_or_else(|| Error::input(format!("--{flag}: required")))
}

fn one_input(f: &Flags) -> Result<&PathBuf> {
    match f.input.as_slice() {
        [p] => Ok(p),
        [] => Err(Error::input("--in: required")),
        _ => Err(Error::input("--in: expected exactly one file")),
    }
}

fn target(f: &Flags) -> Result<Target> {
    match io::read_input(one_input(f)?)? {
        Input::Function(sf) => Ok(Target::Flat(sf)),
        Input::Expr(e) => Ok(Target::Expr(e)),
        Input::Martingale(_) => Err(Error::input("--in: expected a step function or expression, got a martingale")),
    }
}

fn function(f: &Flags) -> Result<StepFunction> {
    match target(f)? {
        Target::Flat(sf) => Ok(sf),
        Target::Expr(_) => Err(Error::input("--in: expected a step function")),
    }
}

fn martingale(f: &Flags) -> Result<MartingaleTree> {
    match io::read_input(one_input(f)?)? {
        Input::Martingale(m) => Ok(m),
        _ => Err(Error::input("--in: expected a martingale")),
    }
}

fn interval(f: &Flags, t: &Target) -> Result<IntervalQuery> {
    let (a, b) = match t {
        Target::Flat(sf) => sf.carrier(),
        Target::Expr(e) => e.carrier(),
    };
    IntervalQuery::new(f.left.unwrap_or(a), f.right.unwrap_or(b))
}

fn query_distribution(t: &Target, q: &IntervalQuery) -> Result<transfer_core::Distribution> {
    match t {
        Target::Flat(sf) => sf.distribution(q),
        Target::Expr(e) => Ok(e.query_distribution(q)?.0),
    }
}

fn report_out(out: &Output, report: &SearchReport, format: Format) -> Result<()> {
    match format {
        Format::Json => out.json(report),
        Format::Csv => out.csv(&report.scan),
    }
}

fn json_only(f: &Flags, cmd: &str) -> Result<()> {
    if f.format == Format::Csv {
        return Err(Error::input(format!("--format: csv is not available for {cmd}")));
    }
    Ok(())
}

#[derive(Serialize)]
struct PieceRow {
    left: f64,
    right: f64,
    value: f64,
}

fn function_out(out: &Output, sf: &StepFunction, format: Format) -> Result<()> {
    match format {
        Format::Json => out.json(sf),
        Format::Csv => {
            let rows: Vec<PieceRow> = sf.pieces().map(|(left, right, value)| PieceRow { left, right, value }).collect();
            out.csv(&rows)
        }
    }
}

fn verify_out(out: &Output, report: &VerifyReport, format: Format) -> Result<u8> {
    match format {
        Format::Json => out.json(report)?,
        Format::Csv => out.csv(&report.checks)?,
    }
    for c in report.failures() {
        eprintln!("check failed: {} (observed {}, expected {}, tolerance {})", c.name, c.observed, c.expected, c.tolerance);
    }
    Ok(if report.pass { 0 } else { 1 })
}

fn expr_out(out: &Output, f: &Flags, e: &ConstructExpr) -> Result<()> {
    match f.materialize {
        Some(max) => out.json(&e.materialize(max)?),
        None => out.json(e),
    }
}

fn domain(f: &Flags, point: bool) -> Result<MembershipDomain> {
    let dom = match (point, f.eps, f.c) {
        (false, Some(eps), None) => MembershipDomain::BmoP { p: f.p.unwrap_or(1.0), eps },
        (false, None, Some(c)) => MembershipDomain::MuckenhouptAp { p: need(f.p, "p")?, c },
        (true, Some(eps), None) => MembershipDomain::ParabolaStrip { eps },
        (true, None, Some(c)) => MembershipDomain::PowerCurveStrip { p: need(f.p, "p")?, c },
        _ => return Err(Error::input("--eps/--C: give exactly one of them to select the domain")),
    };
    dom.validate()?;
    Ok(dom)
}

fn run(cli: &Cli) -> Result<u8> {
    let f = &cli.flags;
    let out = Output::new(f.out.as_deref())?;
    for p in &f.input {
        io::check_readable(p)?;
    }
    let cfg = search_config(f)?;
    match cli.command {
        Command::Eval => {
            json_only(f, "eval")?;
            let t = target(f)?;
            let q = interval(f, &t)?;
            let d = query_distribution(&t, &q)?;
            let mut v = json!({
                "interval": [q.left, q.right],
                "average": d.barycenter(),
                "distribution": d,
            });
            if let Some(p) = f.p {
                v["central_moment"] = json!(DistFunctional::CentralMoment { p }.eval(&d)?);
            }
            out.json(&v)?;
        }
        Command::Norm => {
            let t = target(f)?;
            let obj = objective::BmoObjective::new(need(f.p, "p")?)?;
            let report = search::search(&t, &obj, &cfg, f.format == Format::Csv)?;
            report_out(&out, &report, f.format)?;
        }
        Command::Ap => {
            let t = target(f)?;
            let p = need(f.p, "p")?;
            let obj: Box<dyn objective::Objective> = if p.is_infinite() && p > 0.0 {
                Box::new(objective::AInfObjective)
            } else {
                Box::new(objective::ApObjective::new(p)?)
            };
            let report = search::search(&t, obj.as_ref(), &cfg, f.format == Format::Csv)?;
            report_out(&out, &report, f.format)?;
        }
        Command::Weak => {
            json_only(f, "weak")?;
            let t = target(f)?;
            let q = interval(f, &t)?;
            let lambda = need(f.lambda, "lambda")?;
            let v = DistFunctional::TailMass { lambda }.eval(&query_distribution(&t, &q)?)?;
            out.json(&json!({ "interval": [q.left, q.right], "lambda": lambda, "value": v }))?;
        }
        Command::Expint => {
            json_only(f, "expint")?;
            let t = target(f)?;
            let q = interval(f, &t)?;
            let c = need(f.c, "C")?;
            let v = search::exp_integral(&t, Some(&q), c)?;
            out.json(&json!({ "interval": [q.left, q.right], "C": c, "value": v }))?;
        }
        Command::Rh => {
            json_only(f, "rh")?;
            let t = target(f)?;
            let q = interval(f, &t)?;
            let qq = need(f.q, "q")?;
            let v = DistFunctional::ReverseHolder { q: qq }.eval(&query_distribution(&t, &q)?)?;
            out.json(&json!({ "interval": [q.left, q.right], "q": qq, "value": v }))?;
        }
        Command::Homogenize => {
            json_only(f, "homogenize")?;
            let child = target(f)?.to_expr();
            let e = ConstructExpr::hom(child, f.lambda_hom.unwrap_or(DEFAULT_LAMBDA_HOM), f.levels)?;
            expr_out(&out, f, &e)?;
        }
        Command::Glue => {
            json_only(f, "glue")?;
            let [l, r] = f.input.as_slice() else {
                return Err(Error::input("--in: glue needs two files, left then right"));
            };
            let side = |p: &PathBuf| -> Result<ConstructExpr> {
                match io::read_input(p)? {
                    Input::Function(sf) => Ok(ConstructExpr::leaf(sf)),
                    Input::Expr(e) => Ok(e),
                    Input::Martingale(_) => Err(Error::input("--in: glue needs functions or expressions")),
                }
            };
            let e = ConstructExpr::glue(
                side(l)?,
                side(r)?,
                need(f.alpha, "alpha")?,
                f.lambda_hom.unwrap_or(DEFAULT_LAMBDA_HOM),
                f.levels,
            )?;
            expr_out(&out, f, &e)?;
        }
        Command::Compile => {
            json_only(f, "compile")?;
            let m = martingale(f)?;
            let schedule = Schedule::uniform(f.lambda_hom.unwrap_or(DEFAULT_LAMBDA_HOM), f.levels);
            expr_out(&out, f, &compile_to_circle(&m, &schedule)?)?;
        }
        Command::Validate => {
            json_only(f, "validate")?;
            let m = martingale(f)?;
            let dom = domain(f, !m.is_measure())?;
            let report = validate_membership(&m, &dom, &cfg)?;
            out.json(&report)?;
            return Ok(if report.pass { 0 } else { 1 });
        }
        Command::Staircase => {
            json_only(f, "staircase")?;
            let lambda = need(f.lambda, "lambda")?;
            let depth = need(f.depth, "depth")?;
            let (sf, m) = match f.alpha {
                Some(alpha) => power_staircase(alpha, need(f.p, "p")?, lambda, depth)?,
                None => log_staircase(lambda, depth)?,
            };
            out.json(&json!({ "function": sf, "martingale": m }))?;
        }
        Command::Rearrange => {
            function_out(&out, &function(f)?.monotone_rearrangement()?, f.format)?;
        }
        Command::Monotone => {
            json_only(f, "monotone")?;
            let (sf, map) = match f.input.as_slice() {
                [fp, mp] => {
                    let Input::Function(sf) = io::read_input(fp)? else {
                        return Err(Error::input("--in: first file must be a step function"));
                    };
                    (sf, io::read_json::<MonotoneMap>(mp)?)
                }
                [_] => (function(f)?, MonotoneMap::truncation(need(f.truncate, "truncate")?)),
                _ => return Err(Error::input("--in: give a function, and optionally a monotone map file")),
            };
            let g = sf.compose_monotone(&map);
            let p = f.p.unwrap_or(1.0);
            let before = search::bmo_norm(&sf, p, &cfg)?.lower;
            let after = search::bmo_norm(&g, p, &cfg)?.lower;
            out.json(&json!({
                "function": g,
                "lipschitz": map.lipschitz(),
                "p": p,
                "norm_before": before,
                "norm_after": after,
            }))?;
        }
        Command::Constants => {
            json_only(f, "constants")?;
            let which = f.which.ok_or_else(|| Error::input("--which: required"))?;
            let query = match which {
                Which::C3p => ConstantQuery::C3p { p: need(f.p, "p")? },
                Which::LpEquiv => ConstantQuery::LpEquiv { p: need(f.p, "p")? },
                Which::JnWeakEnvelope => ConstantQuery::JnWeakEnvelope { lambda: need(f.lambda, "lambda")? },
                Which::ClassicJn => ConstantQuery::ClassicJn,
                Which::BellmanLpMoment => ConstantQuery::BellmanValue(BellmanProblem::LpMoment { p: need(f.p, "p")? }),
                Which::BellmanWeakType => {
                    ConstantQuery::BellmanValue(BellmanProblem::WeakType { lambda: need(f.lambda, "lambda")? })
                }
            };
            let map: serde_json::Map<String, Value> =
                query.evaluate()?.into_iter().map(|(k, v)| (k.to_string(), json!(v))).collect();
            out.json(&Value::Object(map))?;
        }
        Command::VerifyJn => {
            let d = JnParams::default();
            let params = JnParams {
                delta: f.delta.unwrap_or(d.delta),
                m: f.m.unwrap_or(d.m),
                max_depth: f.depth.unwrap_or(d.max_depth),
                lambda_hom: f.lambda_hom.unwrap_or(d.lambda_hom),
                levels: f.levels,
            };
            if f.p.is_some_and(|p| p != 1.0) {
                return Err(Error::input("--p: verify-jn runs at p = 1"));
            }
            return verify_out(&out, &verify::verify_jn(&params, &cfg)?, f.format);
        }
        Command::VerifyWeak => {
            return verify_out(&out, &verify::verify_weak(f.count.unwrap_or(100), &cfg)?, f.format);
        }
        Command::VerifyLp => {
            return verify_out(&out, &verify::verify_lp(f.count.unwrap_or(100), &cfg)?, f.format);
        }
        Command::VerifyMonotone => {
            return verify_out(&out, &verify::verify_monotone(f.count.unwrap_or(100), &cfg)?, f.format);
        }
        Command::VerifyRh => {
            let d = RhParams::default();
            let q = f.q.unwrap_or(d.q);
            let reference = match f.r_ref {
                Some(r) => Some(RhReference { p: need(f.p, "p")?, c: need(f.c, "C")?, q, r }),
                None => None,
            };
            let params = RhParams {
                count: f.count.unwrap_or(d.count),
                q,
                lambda: f.lambda.unwrap_or(d.lambda),
                depth: f.depth.unwrap_or(d.depth),
                reference,
            };
            return verify_out(&out, &verify::verify_rh(&params, &cfg)?, f.format);
        }
    }
    Ok(0)
}
