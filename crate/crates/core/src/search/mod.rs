//! Supremum searches over intervals: BMO_p seminorms, A_p and A_inf
//! constants on intervals, lines and circles, plus the exact single-interval
//! quantities (weak-type distribution, exponential integral, Reverse Hölder
//! ratio).
//!
//! Objectives and per-pair strategies are trait objects chosen by name from
//! [`objective::objective`] and [`strategy::strategy`].

pub mod engine;
pub mod objective;
pub mod strategy;

use serde::{Deserialize, Serialize};

use crate::dag::ConstructExpr;
use crate::error::{Error, Result};
use crate::measure::{DistFunctional, IntervalQuery, StepFunction};

pub use engine::{ScanRow, TIE_TOL};
pub use objective::{objective, objective_names, AInfObjective, ApObjective, BmoObjective, Objective};
pub use strategy::{strategy, strategy_names, Strategy, DEFAULT_STRATEGY};

/// Fractional part of the golden ratio, used to spread seeded sample phases.
pub(crate) const GOLDEN_FRACTION: f64 = 0.618_033_988_749_894_8;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SearchConfig {
    /// Grid points per end fraction for each cell pair.
    pub grid: usize,
    /// Rounds of coordinate-wise golden-section refinement.
    pub refine: usize,
    /// Relative tolerance; also the slack allowed by validation suites.
    pub tol: f64,
    /// Cell-count threshold separating searched pairs from sampled long intervals.
    pub r_long: usize,
    /// Longest sampled circle arc, in periods.
    pub max_periods: usize,
    pub certify: bool,
    pub threads: usize,
    pub seed: u64,
    pub strategy: String,
}

impl Default for SearchConfig {
    fn default() -> Self {
        SearchConfig {
            grid: 5,
            refine: 2,
            tol: 1e-6,
            r_long: 4,
            max_periods: 8,
            certify: false,
            threads: 1,
            seed: 0,
            strategy: DEFAULT_STRATEGY.to_string(),
        }
    }
}

impl SearchConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("grid", self.grid),
            ("refine", self.refine),
            ("r_long", self.r_long),
            ("max_periods", self.max_periods),
            ("threads", self.threads),
        ];
        for (name, v) in positive {
            if v == 0 {
                return Err(Error::input(format!("{name}: must be positive")));
            }
        }
        if self.grid < 2 {
            return Err(Error::input("grid: need at least 2 points per end"));
        }
        if !(self.tol > 0.0 && self.tol <= 0.1) {
            return Err(Error::input(format!("tol: must lie in (0, 0.1], got {}", self.tol)));
        }
        strategy(&self.strategy)?;
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchReport {
    pub objective: String,
    /// Value at the witness interval.
    pub lower: f64,
    /// Certified bound on the supremum, present when `certify` is set.
    pub upper: Option<f64>,
    pub witness: [f64; 2],
    pub evaluations: u64,
    pub config: SearchConfig,
    #[serde(skip)]
    pub scan: Vec<ScanRow>,
}

impl SearchReport {
    pub fn witness_query(&self) -> IntervalQuery {
        IntervalQuery { left: self.witness[0], right: self.witness[1] }
    }
}

/// Something to search: a flat step function or a construction expression.
#[derive(Debug, Clone)]
pub enum Target {
    Flat(StepFunction),
    Expr(ConstructExpr),
}

impl From<StepFunction> for Target {
    fn from(f: StepFunction) -> Self {
        Target::Flat(f)
    }
}

impl From<&StepFunction> for Target {
    fn from(f: &StepFunction) -> Self {
        Target::Flat(f.clone())
    }
}

impl From<ConstructExpr> for Target {
    fn from(e: ConstructExpr) -> Self {
        Target::Expr(e)
    }
}

impl From<&ConstructExpr> for Target {
    fn from(e: &ConstructExpr) -> Self {
        Target::Expr(e.clone())
    }
}

impl Target {
    pub fn is_circle(&self) -> bool {
        match self {
            Target::Flat(f) => f.domain().is_circle(),
            Target::Expr(e) => e.is_circle(),
        }
    }

    pub fn to_expr(&self) -> ConstructExpr {
        match self {
            Target::Flat(f) => ConstructExpr::leaf(f.merged()),
            Target::Expr(e) => e.clone(),
        }
    }
}

/// Runs a search with the strategy named in `cfg`.
pub fn search(target: &Target, obj: &dyn Objective, cfg: &SearchConfig, scan: bool) -> Result<SearchReport> {
    cfg.validate()?;
    let strat = strategy(&cfg.strategy)?;
    let root = target.to_expr();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.threads)
        .build()
        .map_err(|e| Error::Internal(format!("thread pool: {e}")))?;
    let res = pool.install(|| engine::Engine::new(&root, obj, strat.as_ref(), cfg, scan)?.run(&root))?;
    let (mut l, mut r) = res.witness;
    if !root.is_circle() {
        let (c0, c1) = root.carrier();
        l = l.max(c0);
        r = r.min(c1);
    }
    let witness = IntervalQuery::new(l, r)?;
    let (d, _) = root.query_distribution(&witness)?;
    let lower = obj.value_of(&d)?;
    let upper = cfg.certify.then(|| {
        let u = res.upper.max(lower);
        u + engine::tie_tol(u)
    });
    Ok(SearchReport {
        objective: obj.name(),
        lower,
        upper,
        witness: [l, r],
        evaluations: res.evaluations,
        config: cfg.clone(),
        scan: res.scan,
    })
}

fn need_interval(t: &Target) -> Result<()> {
    if t.is_circle() {
        Err(Error::input("target: circle-carried, use circle_bmo_norm"))
    } else {
        Ok(())
    }
}

/// BMO_p seminorm of an interval-carried target.
pub fn bmo_norm(target: impl Into<Target>, p: f64, cfg: &SearchConfig) -> Result<SearchReport> {
    let t = target.into();
    need_interval(&t)?;
    search(&t, &BmoObjective::new(p)?, cfg, false)
}

/// BMO_p seminorm over all arcs, long ones included, of a circle-carried target.
pub fn circle_bmo_norm(target: impl Into<Target>, p: f64, cfg: &SearchConfig) -> Result<SearchReport> {
    let t = target.into();
    if !t.is_circle() {
        return Err(Error::input("target: not circle-carried, use bmo_norm or periodize it"));
    }
    search(&t, &BmoObjective::new(p)?, cfg, false)
}

pub fn ap_constant(w: impl Into<Target>, p: f64, cfg: &SearchConfig) -> Result<SearchReport> {
    search(&w.into(), &ApObjective::new(p)?, cfg, false)
}

pub fn a_inf_constant(w: impl Into<Target>, cfg: &SearchConfig) -> Result<SearchReport> {
    search(&w.into(), &AInfObjective, cfg, false)
}

/// `|{x in I : |f - <f>_I| >= lambda}| / |I|`.
pub fn weak_distribution(f: &StepFunction, i: &IntervalQuery, lambda: f64) -> Result<f64> {
    DistFunctional::TailMass { lambda }.eval(&f.distribution(i)?)
}

/// `sum len_i e^{c v_i}` over the pieces in `i` (the whole carrier when
/// absent); overflow yields `+inf`.
pub fn exp_integral(target: &Target, i: Option<&IntervalQuery>, c: f64) -> Result<f64> {
    if !c.is_finite() {
        return Err(Error::input(format!("c: must be finite, got {c}")));
    }
    match target {
        Target::Flat(f) => {
            let (a, b) = f.carrier();
            let q = i.copied().unwrap_or(IntervalQuery { left: a, right: b });
            f.exp_integral(&q, c)
        }
        Target::Expr(e) => {
            let (a, b) = e.carrier();
            let q = i.copied().unwrap_or(IntervalQuery { left: a, right: b });
            let (d, _) = e.query_distribution(&q)?;
            Ok(q.len() * DistFunctional::ExpIntegral { c }.eval(&d)?)
        }
    }
}

/// `<w^q>_I^{1/q} / <w>_I`.
pub fn reverse_holder_ratio(w: &StepFunction, i: &IntervalQuery, q: f64) -> Result<f64> {
    DistFunctional::ReverseHolder { q }.eval(&w.distribution(i)?)
}
