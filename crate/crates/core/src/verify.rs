//! Seeded verification suites. Each returns a [`VerifyReport`] whose checks
//! pair an observed number with the bound or value it is held against.

use serde::{Deserialize, Serialize};

use crate::constants::{c3p, jn_weak_envelope, lp_equiv_constant};
use crate::corpus;
use crate::error::{Error, Result};
use crate::martingale::{compile_to_circle, log_staircase, power_staircase, validate_membership, MembershipDomain, Schedule};
use crate::measure::{DistFunctional, IntervalQuery, MonotoneMap, StepFunction};
use crate::search::{self, ap_constant, bmo_norm, circle_bmo_norm, SearchConfig, Target};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Relation {
    /// `|observed - expected| <= tolerance`
    Eq,
    /// `observed <= expected + tolerance`
    Le,
    /// `observed >= expected - tolerance`
    Ge,
    /// `observed > expected`
    Gt,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub expected: f64,
    pub observed: f64,
    pub tolerance: f64,
    pub relation: Relation,
    pub pass: bool,
}

impl Check {
    pub fn new(name: impl Into<String>, relation: Relation, observed: f64, expected: f64, tolerance: f64) -> Self {
        let pass = match relation {
            Relation::Eq => (observed - expected).abs() <= tolerance,
            Relation::Le => observed <= expected + tolerance,
            Relation::Ge => observed >= expected - tolerance,
            Relation::Gt => observed > expected,
        };
        Check { name: name.into(), expected, observed, tolerance, relation, pass }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerifyReport {
    pub suite: String,
    pub seed: u64,
    pub pass: bool,
    pub checks: Vec<Check>,
}

impl VerifyReport {
    fn new(suite: &str, seed: u64, checks: Vec<Check>) -> Self {
        let pass = checks.iter().all(|c| c.pass);
        VerifyReport { suite: suite.to_string(), seed, pass, checks }
    }

    pub fn failures(&self) -> impl Iterator<Item = &Check> {
        self.checks.iter().filter(|c| !c.pass)
    }
}

/// Slack for inequalities whose sides come from supremum searches.
fn search_slack(cfg: &SearchConfig, scale: f64) -> f64 {
    1e-9 + cfg.tol * scale.abs()
}

fn check_count(n: usize) -> Result<()> {
    if n == 0 {
        return Err(Error::input("count: need at least one instance"));
    }
    Ok(())
}

/// Random step function rescaled to unit BMO_2 norm.
fn normalized(rng: &mut impl rand::Rng, cfg: &SearchConfig) -> Result<StepFunction> {
    let f = corpus::step_function(rng);
    let n2 = bmo_norm(&f, 2.0, cfg)?.lower;
    Ok(f.scaled(1.0 / n2))
}

/// Weak-type envelope: tail masses of unit-norm functions on sampled
/// intervals, evaluated at every jump of the tail function.
pub fn verify_weak(count: usize, cfg: &SearchConfig) -> Result<VerifyReport> {
    check_count(count)?;
    let mut rng = corpus::rng(cfg.seed);
    let mut checks = Vec::with_capacity(count);
    for k in 0..count {
        let g = normalized(&mut rng, cfg)?;
        let wit = bmo_norm(&g, 2.0, cfg)?.witness_query();
        let mut intervals = vec![IntervalQuery { left: 0.0, right: 1.0 }, wit];
        intervals.extend((0..8).map(|_| corpus::subinterval(&mut rng, 0.0, 1.0)));
        let mut worst = (f64::NEG_INFINITY, 0.0, 0.0);
        for q in &intervals {
            let d = g.distribution(q)?;
            let m = d.barycenter();
            for a in d.atoms() {
                let lambda = (a.value - m).abs();
                if lambda <= 0.0 {
                    continue;
                }
                let tail = DistFunctional::TailMass { lambda }.eval(&d)?;
                let env = jn_weak_envelope(lambda)?;
                if tail - env > worst.0 - worst.2 || worst.0 == f64::NEG_INFINITY {
                    worst = (tail, lambda, env);
                }
            }
        }
        let (tail, lambda, env) = worst;
        checks.push(Check::new(
            format!("weak[{k}] tail mass at lambda={lambda:.6} within envelope"),
            Relation::Le,
            tail,
            env,
            search_slack(cfg, 1.0),
        ));
    }
    Ok(VerifyReport::new("verify-weak", cfg.seed, checks))
}

/// Equivalence of BMO_p and BMO_2 norms on unit-norm functions.
pub fn verify_lp(count: usize, cfg: &SearchConfig) -> Result<VerifyReport> {
    check_count(count)?;
    let mut rng = corpus::rng(cfg.seed);
    let mut checks = Vec::new();
    let slack = search_slack(cfg, 1.0);
    for k in 0..count {
        let g = normalized(&mut rng, cfg)?;
        let n2 = bmo_norm(&g, 2.0, cfg)?.lower;
        for p in [1.0, 1.5] {
            let np = bmo_norm(&g, p, cfg)?.lower;
            checks.push(Check::new(format!("lp[{k}] p={p}: norm_p <= norm_2"), Relation::Le, np, n2, slack));
        }
        for p in [3.0, 4.0] {
            let np = bmo_norm(&g, p, cfg)?.lower;
            checks.push(Check::new(format!("lp[{k}] p={p}: norm_2 <= norm_p"), Relation::Ge, np, n2, slack));
            let bound = lp_equiv_constant(p)? * n2;
            checks.push(Check::new(format!("lp[{k}] p={p}: norm_p <= sharp constant"), Relation::Le, np, bound, slack));
        }
    }
    Ok(VerifyReport::new("verify-lp", cfg.seed, checks))
}

/// Transforms that may not increase BMO_p: 1-Lipschitz monotone maps,
/// truncation from above, monotone rearrangement and restriction.
pub fn verify_monotone(count: usize, cfg: &SearchConfig) -> Result<VerifyReport> {
    check_count(count)?;
    let mut rng = corpus::rng(cfg.seed);
    let mut checks = Vec::new();
    for k in 0..count {
        let f = corpus::step_function(&mut rng);
        let map = corpus::lipschitz_map(&mut rng);
        let (lo, hi) = f.value_range();
        let level = lo + (hi - lo) * rand::Rng::gen_range(&mut rng, 0.1..0.9);
        let j = corpus::subinterval(&mut rng, 0.0, 1.0);
        let transformed = [
            ("lipschitz", f.compose_monotone(&map)),
            ("truncation", f.compose_monotone(&MonotoneMap::truncation(level))),
            ("rearrangement", f.monotone_rearrangement()?),
            ("restriction", f.restrict(&j)?),
        ];
        for p in [1.0, 2.0] {
            let base = bmo_norm(&f, p, cfg)?.lower;
            for (name, g) in &transformed {
                let v = bmo_norm(g, p, cfg)?.lower;
                checks.push(Check::new(
                    format!("monotone[{k}] p={p} {name}"),
                    Relation::Le,
                    v,
                    base,
                    search_slack(cfg, base),
                ));
            }
        }
    }
    Ok(VerifyReport::new("verify-monotone", cfg.seed, checks))
}

/// A user-supplied sharp Reverse Hölder value: weights with A_p constant at
/// most `c` have ratio at most `r` for exponent `q`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RhReference {
    pub p: f64,
    pub c: f64,
    pub q: f64,
    pub r: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RhParams {
    pub count: usize,
    pub q: f64,
    /// Ratio of the power staircase used for the closed-form checks.
    pub lambda: f64,
    pub depth: usize,
    pub reference: Option<RhReference>,
}

impl Default for RhParams {
    fn default() -> Self {
        RhParams { count: 100, q: 2.0, lambda: 1.02, depth: 400, reference: None }
    }
}

/// `<x^{aq}>^{1/q} / <x^a>` on `[0, 1]`.
fn power_rh(alpha: f64, q: f64) -> f64 {
    (1.0 / (alpha * q + 1.0)).powf(1.0 / q) * (alpha + 1.0)
}

/// Reverse Hölder ratios: the `x^{1/2}` staircase against its closed form,
/// the staircase A_2 constant, and corpus weights (Jensen lower bound,
/// optional reference upper bound).
pub fn verify_rh(params: &RhParams, cfg: &SearchConfig) -> Result<VerifyReport> {
    check_count(params.count)?;
    if !(params.q > 1.0 && params.q.is_finite()) {
        return Err(Error::input(format!("q: needs q > 1, got {}", params.q)));
    }
    let mut checks = Vec::new();
    let (w, _) = power_staircase(0.5, 2.0, params.lambda, params.depth)?;
    let unit = IntervalQuery { left: 0.0, right: 1.0 };
    let rh = search::reverse_holder_ratio(&w, &unit, params.q)?;
    checks.push(Check::new(
        format!("staircase x^0.5 reverse Holder ratio q={}", params.q),
        Relation::Eq,
        rh,
        power_rh(0.5, params.q),
        1e-3,
    ));
    let a2 = ap_constant(&w, 2.0, cfg)?.lower;
    checks.push(Check::new("staircase x^0.5 A_2 constant", Relation::Eq, a2, 4.0 / 3.0, 0.02 * 4.0 / 3.0));

    let mut rng = corpus::rng(cfg.seed);
    for k in 0..params.count {
        let w = corpus::weight(&mut rng);
        let j = corpus::subinterval(&mut rng, 0.0, 1.0);
        for (label, q) in [("full", unit), ("sub", j)] {
            let r = search::reverse_holder_ratio(&w, &q, params.q)?;
            checks.push(Check::new(format!("rh[{k}] {label} ratio >= 1"), Relation::Ge, r, 1.0, 1e-12));
        }
        if let Some(rf) = params.reference {
            let c = ap_constant(&w, rf.p, cfg)?.lower;
            if c <= rf.c {
                let r = search::reverse_holder_ratio(&w, &unit, rf.q)?;
                checks.push(Check::new(format!("rh[{k}] ratio within reference"), Relation::Le, r, rf.r, 1e-9));
            }
        }
    }
    Ok(VerifyReport::new("verify-rh", cfg.seed, checks))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct JnParams {
    pub delta: f64,
    /// Target for the exponential integral.
    pub m: f64,
    /// Largest staircase depth tried.
    pub max_depth: usize,
    pub lambda_hom: f64,
    pub levels: Option<usize>,
}

impl Default for JnParams {
    fn default() -> Self {
        JnParams { delta: 0.3, m: 2.0, max_depth: 60, lambda_hom: crate::dag::DEFAULT_LAMBDA_HOM, levels: None }
    }
}

/// Output of [`jn_pipeline`] beyond the checks.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JnOutcome {
    pub lambda: f64,
    pub depth: usize,
    pub c: f64,
    pub exp_sum: f64,
    pub circle_lower: f64,
    pub circle_upper: f64,
}

/// The transference mechanism for the John–Nirenberg constant at `p = 1`,
/// with `phi = log(1/x)`: staircase, membership, compilation, distribution
/// identity, exact exponential integral, certified circle norm.
pub fn jn_pipeline(params: &JnParams, cfg: &SearchConfig) -> Result<(VerifyReport, JnOutcome)> {
    if !(params.delta > 0.0 && params.delta.is_finite()) {
        return Err(Error::input(format!("delta: must be positive, got {}", params.delta)));
    }
    if !(params.m > 0.0 && params.m.is_finite()) {
        return Err(Error::input(format!("m: must be positive, got {}", params.m)));
    }
    if params.max_depth == 0 {
        return Err(Error::input("depth: must be positive"));
    }
    let c3 = c3p(1.0)?;
    let eps = c3 + params.delta;
    let lambda = (params.delta / 5.0).exp();
    let c = c3 / eps;
    let mut checks = Vec::new();

    // Exponential sum of e^{c log(1/x)} over the staircase pieces.
    let sum_at = |f: &StepFunction| -> Result<f64> { f.exp_integral(&IntervalQuery { left: 0.0, right: 1.0 }, -c) };
    let mut found = None;
    for n in 1..=params.max_depth {
        let (f, _) = log_staircase(lambda, n)?;
        let s = sum_at(&f)?;
        if s > params.m {
            found = Some((n, s));
            break;
        }
    }
    let Some((depth, exp_sum)) = found else {
        let (f, _) = log_staircase(lambda, params.max_depth)?;
        let s = sum_at(&f)?;
        checks.push(Check::new(format!("staircase depth <= {} reaches m", params.max_depth), Relation::Gt, s, params.m, 0.0));
        let report = VerifyReport::new("verify-jn", cfg.seed, checks);
        let outcome = JnOutcome { lambda, depth: params.max_depth, c, exp_sum: s, circle_lower: f64::NAN, circle_upper: f64::NAN };
        return Ok((report, outcome));
    };
    checks.push(Check::new(format!("staircase depth {depth} exponential sum exceeds m"), Relation::Gt, exp_sum, params.m, 0.0));

    let (f, mart) = log_staircase(lambda, depth)?;
    let flat = bmo_norm(&f, 1.0, cfg)?.lower;
    checks.push(Check::new("staircase BMO_1 norm on [0,1] below eps", Relation::Le, flat, eps, 0.0));

    let report = validate_membership(&mart, &MembershipDomain::BmoP { p: 1.0, eps }, cfg)?;
    checks.push(Check::new("martingale membership margin negative", Relation::Le, report.worst_margin, 0.0, 0.0));
    checks.push(Check::new(
        "martingale leaves are delta measures",
        Relation::Eq,
        report.bad_leaves.len() as f64,
        0.0,
        0.0,
    ));

    let m0 = mart.measure_root().expect("staircase is measure-valued").value.clone();
    let expr = compile_to_circle(&mart, &Schedule::uniform(params.lambda_hom, params.levels))?;
    checks.push(Check::new("compiled distribution equals M0 (TV)", Relation::Eq, expr.distribution().tv_distance(&m0), 0.0, 1e-12));

    let atom_sum = m0.expectation(|v| (-c * v).exp());
    let circle_exp = search::exp_integral(&Target::Expr(expr.clone()), None, -c)?;
    checks.push(Check::new(
        "circle exponential integral equals atom sum",
        Relation::Eq,
        circle_exp,
        atom_sum,
        1e-12 * atom_sum.abs().max(1.0),
    ));

    let circle_cfg = SearchConfig { certify: true, ..cfg.clone() };
    let norm = circle_bmo_norm(&expr, 1.0, &circle_cfg)?;
    let upper = norm.upper.expect("certified search reports an upper bound");
    checks.push(Check::new("circle BMO_1 bracket ordered", Relation::Le, norm.lower, upper, 0.0));
    checks.push(Check::new("circle BMO_1 certified upper bound", Relation::Le, upper, eps + 0.05, 0.0));
    // The periodic function, normalized by its circle norm, has exponential
    // integral over a period above m at the sharp constant.
    let normalized_exp = search::exp_integral(&Target::Expr(expr), None, -c3 / upper)?;
    checks.push(Check::new(
        "circle exponential integral at sharp constant over certified norm exceeds m",
        Relation::Gt,
        normalized_exp,
        params.m,
        0.0,
    ));

    let outcome = JnOutcome { lambda, depth, c, exp_sum, circle_lower: norm.lower, circle_upper: upper };
    Ok((VerifyReport::new("verify-jn", cfg.seed, checks), outcome))
}

pub fn verify_jn(params: &JnParams, cfg: &SearchConfig) -> Result<VerifyReport> {
    Ok(jn_pipeline(params, cfg)?.0)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn relations() {
        assert!(Check::new("a", Relation::Eq, 1.0, 1.0 + 1e-13, 1e-12).pass);
        assert!(!Check::new("a", Relation::Le, 1.1, 1.0, 0.05).pass);
        assert!(Check::new("a", Relation::Ge, 0.99, 1.0, 0.05).pass);
        assert!(!Check::new("a", Relation::Gt, 1.0, 1.0, 0.0).pass);
    }

    #[test]
    fn power_rh_closed_form() {
        assert!((power_rh(0.5, 2.0) - 1.0606601717798212).abs() < 1e-15);
        assert!((power_rh(0.0, 3.0) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn small_suites_pass() {
        let cfg = SearchConfig { seed: 11, ..SearchConfig::default() };
        for r in [verify_weak(5, &cfg).unwrap(), verify_lp(5, &cfg).unwrap(), verify_monotone(5, &cfg).unwrap()] {
            assert!(r.pass, "{:?}", r.failures().collect::<Vec<_>>());
        }
        assert!(verify_lp(0, &cfg).is_err());
    }
}
