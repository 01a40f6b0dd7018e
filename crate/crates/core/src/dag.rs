//! Lazy construction expressions: leaves, constants, λ-homogenization,
//! gluing and periodization.
//!
//! Nodes never materialize their pieces. Every node caches its exact
//! distribution, so an interval query only recurses into the (at most two)
//! partially covered copies at each level and treats whole copies through the
//! cache. Query cost is linear in construction depth.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::measure::{DistFunctional, Distribution, Domain, IntervalQuery, StepFunction};

pub const DEFAULT_LAMBDA_HOM: f64 = 0.9;
/// Default truncation picks the smallest `K` with `λ^K <= DEFAULT_RESIDUAL`.
pub const DEFAULT_RESIDUAL: f64 = 1e-3;

/// Smallest `K >= 1` with `lambda^K <= residual`.
pub fn default_levels(lambda: f64, residual: f64) -> usize {
    ((residual.ln() / lambda.ln()).ceil() as usize).max(1)
}

/// Realized truncated partition of `[-1/2, 1/2]` from left to right:
/// residual cell, `I_{K,-}`, ..., `I_{1,-}`, `I_{1,+}`, ..., `I_{K,+}`, residual cell.
pub fn hom_partition(lambda: f64, levels: usize) -> Result<Vec<f64>> {
    check_hom(lambda, levels)?;
    let mut right = Vec::with_capacity(levels + 2);
    right.push(0.0);
    let mut pow = 1.0;
    for _ in 0..levels {
        pow *= lambda;
        right.push(0.5 * (1.0 - pow));
    }
    right.push(0.5);
    if right.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::input("levels: partition cells underflow in binary64"));
    }
    let mut bounds: Vec<f64> = right.iter().rev().map(|x| -x).collect();
    bounds.extend_from_slice(&right[1..]);
    Ok(bounds)
}

fn check_hom(lambda: f64, levels: usize) -> Result<()> {
    if !(lambda > 0.0 && lambda < 1.0) {
        return Err(Error::input(format!("lambda_hom: must lie in (0,1), got {lambda}")));
    }
    if levels < 1 {
        return Err(Error::input("levels: K must be at least 1"));
    }
    Ok(())
}

#[derive(Debug)]
enum Kind {
    Leaf(StepFunction),
    Constant(f64),
    Hom { child: ConstructExpr, lambda: f64, levels: usize },
    /// `right` fills `[0, alpha)`, `left` fills `[alpha, 1)`; cells
    /// `[0, split)` carry `right`.
    Glue {
        left: ConstructExpr,
        right: ConstructExpr,
        alpha: f64,
        lambda: f64,
        levels: usize,
        split: usize,
    },
    Periodize(ConstructExpr),
}

#[derive(Debug)]
struct Node {
    kind: Kind,
    dist: Distribution,
    depth: usize,
    carrier: (f64, f64),
    circle: bool,
    /// Cell boundaries for Hom and Glue nodes.
    bounds: Vec<f64>,
}

/// Shared handle to an immutable expression node.
#[derive(Debug, Clone)]
pub struct ConstructExpr(Arc<Node>);

/// What fills one cell of a node's carrier.
#[derive(Debug, Clone)]
pub enum CellContent {
    Atom(f64),
    /// Affine copy of the expression's carrier.
    Copy(ConstructExpr),
}

#[derive(Debug, Clone)]
pub struct Cell {
    pub lo: f64,
    pub hi: f64,
    pub content: CellContent,
}

impl Cell {
    pub fn len(&self) -> f64 {
        self.hi - self.lo
    }
}

/// Bookkeeping from one query.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize)]
pub struct QueryStats {
    /// Deepest recursion level reached.
    pub depth: usize,
    /// Fraction of the query length routed into partially covered top-level copies.
    pub partial_weight: f64,
    /// Node visits.
    pub visits: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct QueryResult {
    pub value: f64,
    pub depth: usize,
    pub partial_weight: f64,
    pub visits: u64,
}

/// Receives `(value, mass)` contributions from a query.
pub trait MassSink {
    fn point(&mut self, value: f64, mass: f64);
    /// The whole cached distribution of `node`, scaled to total `mass`.
    fn whole(&mut self, node: &ConstructExpr, mass: f64);
}

#[derive(Default)]
pub struct VecSink(pub Vec<(f64, f64)>);

impl MassSink for VecSink {
    fn point(&mut self, value: f64, mass: f64) {
        self.0.push((value, mass));
    }
    fn whole(&mut self, node: &ConstructExpr, mass: f64) {
        self.0.extend(node.distribution().atoms().iter().map(|a| (a.value, a.weight * mass)));
    }
}

struct Ctx {
    visits: u64,
    depth: usize,
    limit: usize,
    partial: f64,
    top_counted: bool,
}

impl ConstructExpr {
    fn from_node(node: Node) -> Self {
        ConstructExpr(Arc::new(node))
    }

    pub fn leaf(f: StepFunction) -> Self {
        let dist = f.full_distribution();
        let carrier = f.carrier();
        let circle = f.domain().is_circle();
        Self::from_node(Node { kind: Kind::Leaf(f), dist, depth: 0, carrier, circle, bounds: vec![] })
    }

    pub fn constant(v: f64) -> Result<Self> {
        if !v.is_finite() {
            return Err(Error::input(format!("value: constant must be finite, got {v}")));
        }
        Ok(Self::from_node(Node {
            kind: Kind::Constant(v),
            dist: Distribution::delta(v),
            depth: 0,
            carrier: (-0.5, 0.5),
            circle: false,
            bounds: vec![],
        }))
    }

    /// λ-homogenization truncated at `levels`; the two residual end cells
    /// each carry one more copy, so the distribution is preserved exactly.
    pub fn hom(child: ConstructExpr, lambda: f64, levels: Option<usize>) -> Result<Self> {
        let levels = levels.unwrap_or_else(|| default_levels(lambda, DEFAULT_RESIDUAL));
        let bounds = hom_partition(lambda, levels)?;
        Ok(Self::from_node(Node {
            dist: child.distribution().clone(),
            depth: child.depth() + 1,
            carrier: (-0.5, 0.5),
            circle: false,
            bounds,
            kind: Kind::Hom { child, lambda, levels },
        }))
    }

    /// Circle function with `Γ_λ[right]` on `[0, alpha)` and `Γ_λ[left]` on
    /// `[alpha, 1)`; its distribution is `(1 - alpha) μ_left + alpha μ_right`.
    pub fn glue(
        left: ConstructExpr,
        right: ConstructExpr,
        alpha: f64,
        lambda: f64,
        levels: Option<usize>,
    ) -> Result<Self> {
        if !(alpha > 0.0 && alpha < 1.0) {
            return Err(Error::input(format!("alpha: must lie in (0,1), got {alpha}")));
        }
        let levels = levels.unwrap_or_else(|| default_levels(lambda, DEFAULT_RESIDUAL));
        let part = hom_partition(lambda, levels)?;
        let mut bounds: Vec<f64> = part.iter().map(|x| (x + 0.5) * alpha).collect();
        let split = bounds.len() - 1;
        bounds.extend(part[1..].iter().map(|x| alpha + (x + 0.5) * (1.0 - alpha)));
        bounds[split] = alpha;
        *bounds.last_mut().unwrap() = 1.0;
        if bounds.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::input("alpha: glued cells underflow in binary64"));
        }
        let dist = left.distribution().mix(right.distribution(), alpha)?;
        Ok(Self::from_node(Node {
            dist,
            depth: left.depth().max(right.depth()) + 1,
            carrier: (0.0, 1.0),
            circle: true,
            bounds,
            kind: Kind::Glue { left, right, alpha, lambda, levels, split },
        }))
    }

    /// Periodic extension of the child with its carrier rescaled to one period.
    pub fn periodize(child: ConstructExpr) -> Self {
        Self::from_node(Node {
            dist: child.distribution().clone(),
            depth: child.depth() + 1,
            carrier: (0.0, 1.0),
            circle: true,
            bounds: vec![],
            kind: Kind::Periodize(child),
        })
    }

    pub fn distribution(&self) -> &Distribution {
        &self.0.dist
    }

    pub fn depth(&self) -> usize {
        self.0.depth
    }

    pub fn carrier(&self) -> (f64, f64) {
        self.0.carrier
    }

    pub fn is_circle(&self) -> bool {
        self.0.circle
    }

    pub fn is_constant(&self) -> bool {
        self.0.dist.is_delta()
    }

    pub fn ptr_id(&self) -> usize {
        Arc::as_ptr(&self.0) as usize
    }

    pub fn as_leaf(&self) -> Option<&StepFunction> {
        match &self.0.kind {
            Kind::Leaf(f) => Some(f),
            _ => None,
        }
    }

    pub fn kind_name(&self) -> &'static str {
        match self.0.kind {
            Kind::Leaf(_) => "leaf",
            Kind::Constant(_) => "const",
            Kind::Hom { .. } => "hom",
            Kind::Glue { .. } => "glue",
            Kind::Periodize(_) => "periodize",
        }
    }

    /// Direct sub-expressions.
    pub fn children(&self) -> Vec<ConstructExpr> {
        match &self.0.kind {
            Kind::Leaf(_) | Kind::Constant(_) => vec![],
            Kind::Hom { child, .. } | Kind::Periodize(child) => vec![child.clone()],
            Kind::Glue { left, right, .. } => vec![right.clone(), left.clone()],
        }
    }

    /// Cells tiling the carrier, left to right.
    pub fn cells(&self) -> Vec<Cell> {
        let n = &self.0;
        match &n.kind {
            Kind::Leaf(f) => f
                .pieces()
                .map(|(lo, hi, v)| Cell { lo, hi, content: CellContent::Atom(v) })
                .collect(),
            Kind::Constant(v) => {
                vec![Cell { lo: n.carrier.0, hi: n.carrier.1, content: CellContent::Atom(*v) }]
            }
            Kind::Hom { child, .. } => {
                let content = content_of(child);
                n.bounds
                    .windows(2)
                    .map(|w| Cell { lo: w[0], hi: w[1], content: content.clone() })
                    .collect()
            }
            Kind::Glue { left, right, split, .. } => {
                let (cr, cl) = (content_of(right), content_of(left));
                n.bounds
                    .windows(2)
                    .enumerate()
                    .map(|(i, w)| Cell {
                        lo: w[0],
                        hi: w[1],
                        content: if i < *split { cr.clone() } else { cl.clone() },
                    })
                    .collect()
            }
            Kind::Periodize(child) => {
                let (c0, c1) = child.carrier();
                let scale = 1.0 / (c1 - c0);
                let mut cells: Vec<Cell> = child
                    .cells()
                    .into_iter()
                    .map(|c| Cell { lo: (c.lo - c0) * scale, hi: (c.hi - c0) * scale, content: c.content })
                    .collect();
                cells[0].lo = 0.0;
                cells.last_mut().unwrap().hi = 1.0;
                cells
            }
        }
    }

    /// Exact distribution over `q`. Circle-carried expressions accept any
    /// interval of the line; others need `q` inside the carrier.
    pub fn query_distribution(&self, q: &IntervalQuery) -> Result<(Distribution, QueryStats)> {
        let mut sink = VecSink::default();
        let stats = self.accumulate(q, &mut sink)?;
        Ok((Distribution::from_masses(sink.0)?, stats))
    }

    /// Evaluates `functional` on the exact distribution over `q`.
    pub fn query(&self, q: &IntervalQuery, functional: &DistFunctional) -> Result<QueryResult> {
        let (d, s) = self.query_distribution(q)?;
        Ok(QueryResult {
            value: functional.eval(&d)?,
            depth: s.depth,
            partial_weight: s.partial_weight,
            visits: s.visits,
        })
    }

    /// Streams the masses over `q` into `sink`; masses are lengths.
    pub fn accumulate(&self, q: &IntervalQuery, sink: &mut dyn MassSink) -> Result<QueryStats> {
        let (c0, c1) = self.carrier();
        let mut ctx = Ctx {
            visits: 0,
            depth: 0,
            limit: 10 * (self.depth() + 1),
            partial: 0.0,
            top_counted: false,
        };
        if self.is_circle() {
            self.acc_periodic(q.left, q.right, sink, &mut ctx)?;
        } else {
            let slack = 1e-12 * (c1 - c0).max(1.0);
            if q.left < c0 - slack || q.right > c1 + slack {
                return Err(Error::input(format!(
                    "query: [{}, {}] is not inside the carrier [{c0}, {c1}]",
                    q.left, q.right
                )));
            }
            self.acc(q.left.max(c0), q.right.min(c1), 1.0, 0, sink, &mut ctx)?;
        }
        Ok(QueryStats { depth: ctx.depth, partial_weight: ctx.partial / q.len(), visits: ctx.visits })
    }

    fn acc_periodic(&self, l: f64, r: f64, sink: &mut dyn MassSink, ctx: &mut Ctx) -> Result<()> {
        if let Kind::Leaf(f) = &self.0.kind {
            ctx.visits += 1;
            for (v, m) in f.overlaps_unchecked(l, r) {
                sink.point(v, m);
            }
            return Ok(());
        }
        let c0 = self.0.carrier.0;
        let c1 = c0 + 1.0;
        let k = (l - c0).floor();
        let lp = (l - k).clamp(c0, c1);
        let rp = r - k;
        if rp <= c1 {
            return self.acc(lp, rp.max(lp), 1.0, 0, sink, ctx);
        }
        let whole = (rp - c1).floor();
        let rem = rp - c1 - whole;
        ctx.partial += (c1 - lp) + rem;
        ctx.top_counted = true;
        if c1 > lp {
            self.acc(lp, c1, 1.0, 0, sink, ctx)?;
        }
        if whole > 0.0 {
            sink.whole(self, whole);
        }
        if rem > 0.0 {
            self.acc(c0, c0 + rem, 1.0, 0, sink, ctx)?;
        }
        Ok(())
    }

    /// `[l, r]` inside the carrier; masses are lengths times `scale`.
    fn acc(
        &self,
        l: f64,
        r: f64,
        scale: f64,
        level: usize,
        sink: &mut dyn MassSink,
        ctx: &mut Ctx,
    ) -> Result<()> {
        ctx.visits += 1;
        ctx.depth = ctx.depth.max(level);
        if level > ctx.limit {
            return Err(Error::Internal(format!("query recursion exceeded {} levels", ctx.limit)));
        }
        if r <= l {
            return Ok(());
        }
        let n = &self.0;
        if l <= n.carrier.0 && r >= n.carrier.1 {
            sink.whole(self, (n.carrier.1 - n.carrier.0) * scale);
            return Ok(());
        }
        match &n.kind {
            Kind::Leaf(f) => {
                for (v, m) in f.overlaps_unchecked(l, r) {
                    sink.point(v, m * scale);
                }
            }
            Kind::Constant(v) => sink.point(*v, (r - l) * scale),
            Kind::Periodize(child) => {
                let (c0, c1) = child.carrier();
                let s = c1 - c0;
                child.acc(c0 + l * s, c0 + r * s, scale / s, level + 1, sink, ctx)?;
            }
            Kind::Hom { child, .. } => {
                self.acc_cells(l, r, scale, level, sink, ctx, |_| child)?;
            }
            Kind::Glue { left, right, split, .. } => {
                let split = *split;
                self.acc_cells(l, r, scale, level, sink, ctx, |i| if i < split { right } else { left })?;
            }
        }
        Ok(())
    }

    #[allow(clippy::too_many_arguments)]
    fn acc_cells<'a>(
        &'a self,
        l: f64,
        r: f64,
        scale: f64,
        level: usize,
        sink: &mut dyn MassSink,
        ctx: &mut Ctx,
        content: impl Fn(usize) -> &'a ConstructExpr,
    ) -> Result<()> {
        let b = &self.0.bounds;
        let ncells = b.len() - 1;
        let i0 = b[1..].partition_point(|&x| x <= l).min(ncells - 1);
        let i1 = b[1..].partition_point(|&x| x < r).min(ncells - 1);
        let count_partial = level == 0 && !ctx.top_counted;
        let partial = |i: usize, a: f64, z: f64, sink: &mut dyn MassSink, ctx: &mut Ctx| -> Result<()> {
            let (lo, hi) = (b[i], b[i + 1]);
            let child = content(i);
            if a <= lo && z >= hi {
                sink.whole(child, (hi - lo) * scale);
                return Ok(());
            }
            if count_partial {
                ctx.partial += (z - a) * scale;
            }
            let (c0, c1) = child.carrier();
            let s = (c1 - c0) / (hi - lo);
            let ca = (c0 + (a - lo) * s).max(c0);
            let cz = (c0 + (z - lo) * s).min(c1);
            child.acc(ca, cz, scale / s, level + 1, sink, ctx)
        };
        if i0 == i1 {
            return partial(i0, l, r, sink, ctx);
        }
        partial(i0, l, b[i0 + 1], sink, ctx)?;
        if i1 > i0 + 1 {
            // whole cells i0+1 .. i1-1, grouped by content
            let mut start = i0 + 1;
            while start < i1 {
                let c = content(start);
                let mut end = start + 1;
                while end < i1 && Arc::ptr_eq(&content(end).0, &c.0) {
                    end += 1;
                }
                sink.whole(c, (b[end] - b[start]) * scale);
                start = end;
            }
        }
        partial(i1, b[i1], r, sink, ctx)
    }

    /// Number of pieces a flattening would produce (constant subtrees count once).
    pub fn piece_count(&self) -> u128 {
        if self.is_constant() {
            return 1;
        }
        match &self.0.kind {
            Kind::Leaf(f) => f.piece_count() as u128,
            Kind::Constant(_) => 1,
            Kind::Hom { child, .. } => ((self.0.bounds.len() - 1) as u128).saturating_mul(child.piece_count()),
            Kind::Glue { left, right, split, .. } => {
                let n = (self.0.bounds.len() - 1) as u128;
                let s = *split as u128;
                s.saturating_mul(right.piece_count()).saturating_add((n - s).saturating_mul(left.piece_count()))
            }
            Kind::Periodize(child) => child.piece_count(),
        }
    }

    /// Flat step function over one carrier (one period for circle expressions).
    pub fn materialize(&self, max_pieces: usize) -> Result<StepFunction> {
        let required = self.piece_count();
        if required > max_pieces as u128 {
            return Err(Error::Budget { required, budget: max_pieces });
        }
        if let Kind::Leaf(f) = &self.0.kind {
            return Ok(f.clone());
        }
        let (c0, c1) = self.carrier();
        let mut pieces: Vec<(f64, f64)> = Vec::with_capacity(required as usize);
        self.flatten(c0, c1, &mut pieces);
        let mut bps = vec![c0];
        let mut vals: Vec<f64> = Vec::new();
        for (hi, v) in pieces {
            if hi <= *bps.last().unwrap() {
                continue;
            }
            if vals.last() == Some(&v) {
                *bps.last_mut().unwrap() = hi;
            } else {
                vals.push(v);
                bps.push(hi);
            }
        }
        *bps.last_mut().unwrap() = c1;
        if self.is_circle() {
            StepFunction::new(Domain::Circle, bps, vals)
        } else {
            StepFunction::on_interval(bps, vals)
        }
    }

    /// Appends `(right end, value)` for the pieces of this node mapped onto `[a, b]`.
    fn flatten(&self, a: f64, b: f64, out: &mut Vec<(f64, f64)>) {
        if self.is_constant() {
            out.push((b, self.0.dist.min_value()));
            return;
        }
        let (c0, c1) = self.carrier();
        let map = |x: f64| a + (x - c0) * (b - a) / (c1 - c0);
        match &self.0.kind {
            Kind::Leaf(f) => {
                for (_, hi, v) in f.pieces() {
                    out.push((map(hi), v));
                }
            }
            Kind::Constant(v) => out.push((b, *v)),
            Kind::Periodize(child) => child.flatten(a, b, out),
            Kind::Hom { .. } | Kind::Glue { .. } => {
                for cell in self.cells() {
                    let (lo, hi) = (map(cell.lo), map(cell.hi));
                    match cell.content {
                        CellContent::Atom(v) => out.push((hi, v)),
                        CellContent::Copy(e) => e.flatten(lo, hi, out),
                    }
                }
            }
        }
        if let Some(last) = out.last_mut() {
            last.0 = b;
        }
    }

    pub fn to_spec(&self) -> ExprSpec {
        match &self.0.kind {
            Kind::Leaf(f) => ExprSpec::Leaf { f: f.clone() },
            Kind::Constant(v) => ExprSpec::Const { value: *v },
            Kind::Hom { child, lambda, levels } => ExprSpec::Hom {
                child: Box::new(child.to_spec()),
                lambda_hom: *lambda,
                levels: Some(*levels),
            },
            Kind::Glue { left, right, alpha, lambda, levels, .. } => ExprSpec::Glue {
                left: Box::new(left.to_spec()),
                right: Box::new(right.to_spec()),
                alpha: *alpha,
                lambda_hom: *lambda,
                levels: Some(*levels),
            },
            Kind::Periodize(child) => ExprSpec::Periodize { child: Box::new(child.to_spec()) },
        }
    }
}

fn content_of(e: &ConstructExpr) -> CellContent {
    if e.is_constant() {
        CellContent::Atom(e.distribution().min_value())
    } else {
        CellContent::Copy(e.clone())
    }
}

/// Serialized form of an expression tree.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum ExprSpec {
    Leaf {
        f: StepFunction,
    },
    Const {
        value: f64,
    },
    Hom {
        child: Box<ExprSpec>,
        lambda_hom: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        levels: Option<usize>,
    },
    Glue {
        left: Box<ExprSpec>,
        right: Box<ExprSpec>,
        alpha: f64,
        lambda_hom: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        levels: Option<usize>,
    },
    Periodize {
        child: Box<ExprSpec>,
    },
}

impl ExprSpec {
    pub fn build(&self) -> Result<ConstructExpr> {
        Ok(match self {
            ExprSpec::Leaf { f } => ConstructExpr::leaf(f.clone()),
            ExprSpec::Const { value } => ConstructExpr::constant(*value)?,
            ExprSpec::Hom { child, lambda_hom, levels } => {
                ConstructExpr::hom(child.build()?, *lambda_hom, *levels)?
            }
            ExprSpec::Glue { left, right, alpha, lambda_hom, levels } => {
                ConstructExpr::glue(left.build()?, right.build()?, *alpha, *lambda_hom, *levels)?
            }
            ExprSpec::Periodize { child } => ConstructExpr::periodize(child.build()?),
        })
    }
}

impl Serialize for ConstructExpr {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        self.to_spec().serialize(s)
    }
}

impl<'de> Deserialize<'de> for ConstructExpr {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        ExprSpec::deserialize(d)?.build().map_err(serde::de::Error::custom)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measure::Atom;

    fn sign() -> StepFunction {
        StepFunction::on_interval(vec![-1.0, 0.0, 1.0], vec![-1.0, 1.0]).unwrap()
    }

    fn q(l: f64, r: f64) -> IntervalQuery {
        IntervalQuery::new(l, r).unwrap()
    }

    #[test]
    fn partition_neighbor_ratio() {
        let lambda = 0.8;
        let b = hom_partition(lambda, 6).unwrap();
        assert_eq!(b.len(), 2 * 7 + 1);
        assert_eq!(b[0], -0.5);
        assert_eq!(b[7], 0.0);
        let lens: Vec<f64> = b.windows(2).map(|w| w[1] - w[0]).collect();
        // I_{1,+} .. I_{K,+} are cells 7 .. 12
        for k in 7..12 {
            let ratio = lens[k + 1] / lens[k];
            assert!(ratio >= lambda - 1e-12 && ratio <= 1.0 / lambda + 1e-12, "ratio {ratio}");
        }
        // the residual junction degrades to lambda / (1 - lambda)
        assert!((lens[13] / lens[12] - lambda / (1.0 - lambda)).abs() < 1e-9);
    }

    #[test]
    fn hom_of_constant_is_constant() {
        let e = ConstructExpr::hom(ConstructExpr::constant(2.5).unwrap(), 0.7, Some(4)).unwrap();
        let f = e.materialize(10).unwrap();
        assert_eq!(f.values(), &[2.5]);
        let (d, _) = e.query_distribution(&q(-0.3, 0.41)).unwrap();
        assert!(d.is_delta());
    }

    #[test]
    fn hom_preserves_distribution() {
        let e = ConstructExpr::hom(ConstructExpr::leaf(sign()), 0.9, Some(20)).unwrap();
        let (d, _) = e.query_distribution(&q(-0.5, 0.5)).unwrap();
        assert_eq!(d.tv_distance(&sign().full_distribution()), 0.0);
        assert_eq!(e.distribution(), &sign().full_distribution());
    }

    #[test]
    fn materialize_counts() {
        let e = ConstructExpr::leaf(sign());
        assert_eq!(e.materialize(2).unwrap(), sign());
        let h = ConstructExpr::hom(e, 0.5, Some(3)).unwrap();
        assert_eq!(h.piece_count(), 16);
        assert_eq!(h.materialize(16).unwrap().piece_count(), 16);
        match h.materialize(15) {
            Err(Error::Budget { required, .. }) => assert_eq!(required, 16),
            other => panic!("expected budget error, got {other:?}"),
        }
        let g = ConstructExpr::glue(
            ConstructExpr::constant(0.0).unwrap(),
            ConstructExpr::constant(1.0).unwrap(),
            0.5,
            0.5,
            Some(2),
        )
        .unwrap();
        let flat = g.materialize(100).unwrap();
        assert_eq!(flat.piece_count(), 2);
        assert_eq!(flat.values(), &[1.0, 0.0]);
        assert!(flat.domain().is_circle());
    }

    #[test]
    fn glue_of_constants() {
        let (a, b, alpha) = (-0.5, 2.0, 0.25);
        let g = ConstructExpr::glue(
            ConstructExpr::constant(a).unwrap(),
            ConstructExpr::constant(b).unwrap(),
            alpha,
            0.9,
            None,
        )
        .unwrap();
        assert_eq!(
            g.distribution().atoms(),
            &[Atom { value: a, weight: 0.75 }, Atom { value: b, weight: 0.25 }]
        );
        let r = g.query(&q(0.0, 1.0), &DistFunctional::CentralMoment { p: 1.0 }).unwrap();
        assert!((r.value - 2.0 * alpha * (1.0 - alpha) * (a - b).abs()).abs() < 1e-12);
    }

    #[test]
    fn glue_argument_errors() {
        let c = ConstructExpr::constant(0.0).unwrap();
        assert!(ConstructExpr::glue(c.clone(), c.clone(), 1.0, 0.9, None).is_err());
        assert!(ConstructExpr::hom(c.clone(), 1.0, None).is_err());
        assert!(ConstructExpr::hom(c, 0.5, Some(0)).is_err());
    }

    #[test]
    fn periodize_whole_periods() {
        let f = StepFunction::on_interval(vec![0.0, 0.3, 1.0], vec![1.0, 4.0]).unwrap();
        let p = ConstructExpr::periodize(ConstructExpr::leaf(f.clone()));
        for k in 1..5 {
            let r = p.query(&q(0.0, k as f64), &DistFunctional::Barycenter).unwrap();
            assert!((r.value - f.full_distribution().barycenter()).abs() < 1e-12);
        }
        // long query: the partial weight stays below 2 / |J|
        let r = p.query(&q(0.37, 7.81), &DistFunctional::Barycenter).unwrap();
        assert!(r.partial_weight <= 2.0 / 7.44 + 1e-12);
    }

    #[test]
    fn leaf_query_matches_measure_core() {
        let f = StepFunction::on_interval(vec![0.0, 0.2, 0.5, 0.9, 1.0], vec![1.0, -2.0, 0.5, 3.0]).unwrap();
        let e = ConstructExpr::leaf(f.clone());
        let j = q(0.1, 0.95);
        let (d, _) = e.query_distribution(&j).unwrap();
        assert_eq!(d.tv_distance(&f.distribution(&j).unwrap()), 0.0);
    }

    #[test]
    fn recursion_depth_and_visits_are_linear() {
        let mut e = ConstructExpr::leaf(sign());
        let mut visits = vec![];
        for _ in 0..12 {
            e = ConstructExpr::glue(e.clone(), ConstructExpr::constant(0.3).unwrap(), 0.4, 0.9, None).unwrap();
            let r = e.query(&q(0.123, 0.877), &DistFunctional::Barycenter).unwrap();
            visits.push(r.visits);
        }
        // at most two partial ends per level, each costing a bounded number of visits
        for (d, v) in visits.iter().enumerate() {
            assert!(*v <= 4 * (d as u64 + 2), "depth {d}: {v} visits");
        }
    }

    #[test]
    fn json_round_trip() {
        let e = ConstructExpr::glue(
            ConstructExpr::hom(ConstructExpr::leaf(sign()), 0.6, Some(3)).unwrap(),
            ConstructExpr::constant(1.5).unwrap(),
            0.3,
            0.8,
            Some(5),
        )
        .unwrap();
        let s = serde_json::to_string(&e).unwrap();
        let back: ConstructExpr = serde_json::from_str(&s).unwrap();
        assert_eq!(back.to_spec(), e.to_spec());
        assert!(serde_json::from_str::<ConstructExpr>(r#"{"kind":"hom","child":{"kind":"const","value":1},"lambda_hom":1.5}"#).is_err());
    }

    #[test]
    fn materialized_queries_agree() {
        let e = ConstructExpr::glue(
            ConstructExpr::hom(ConstructExpr::leaf(sign()), 0.6, Some(3)).unwrap(),
            ConstructExpr::leaf(StepFunction::on_interval(vec![0.0, 0.5, 1.0], vec![2.0, 3.0]).unwrap()),
            0.3,
            0.7,
            Some(4),
        )
        .unwrap();
        let flat = e.materialize(100_000).unwrap();
        for (l, r) in [(0.0, 1.0), (0.05, 0.61), (0.29, 0.31), (-0.4, 2.7), (0.999, 1.002)] {
            let j = q(l, r);
            let (d, _) = e.query_distribution(&j).unwrap();
            let df = flat.distribution(&j).unwrap();
            for p in [1.0, 2.0, 3.0] {
                assert!((d.central_moment(p) - df.central_moment(p)).abs() < 1e-10);
            }
            assert!((d.barycenter() - df.barycenter()).abs() < 1e-10);
        }
    }
}
