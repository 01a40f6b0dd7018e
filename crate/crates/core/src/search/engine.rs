//! Structure-aware supremum search over a construction expression.
//!
//! Every node is searched once (memoized by identity). Intervals inside one
//! copy of a child are affine images of child intervals, so they reuse the
//! child's result. Intervals crossing cells are handled as cell pairs: the
//! whole cells in between are accumulated once and the two end fractions are
//! optimized by the configured strategy. Pairs spanning more than `r_long`
//! cells of a non-flat node, and long circle arcs, are sampled on a
//! logarithmic length grid. The certified bound is the sharp range bound of
//! the node, or of the children for intervals inside one copy.

use std::collections::HashMap;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, Mutex};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::objective::{Accumulator, Objective};
use super::strategy::Strategy;
use super::SearchConfig;
use crate::dag::{CellContent, ConstructExpr, MassSink};
use crate::error::{Error, Result};
use crate::measure::IntervalQuery;

/// Relative tolerance under which two candidate values count as tied.
pub const TIE_TOL: f64 = 1e-12;

/// Target slack, relative, when polishing a tied pair toward its own optimum.
const POLISH_TOL: f64 = 1e-14;

pub(crate) fn tie_tol(v: f64) -> f64 {
    TIE_TOL * v.abs().max(1.0)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct Cand {
    pub value: f64,
    pub left: f64,
    pub right: f64,
}

impl Cand {
    fn len(&self) -> f64 {
        self.right - self.left
    }
}

/// Max value, ties broken by the lexicographically smallest `(left, length)`.
pub(crate) fn reduce(cands: &[Cand]) -> Option<Cand> {
    let vmax = cands.iter().map(|c| c.value).fold(f64::NEG_INFINITY, f64::max);
    if vmax == f64::NEG_INFINITY {
        return None;
    }
    let cut = vmax - tie_tol(vmax);
    cands
        .iter()
        .filter(|c| c.value >= cut)
        .min_by(|x, y| x.left.total_cmp(&y.left).then(x.len().total_cmp(&y.len())))
        .copied()
}

/// One row of a scan dump.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScanRow {
    pub left: f64,
    pub right: f64,
    pub length: f64,
    pub value: f64,
}

#[derive(Debug, Clone, Copy)]
struct Outcome {
    best: Cand,
    upper: f64,
}

#[derive(Clone)]
enum Fill {
    Atom(usize),
    Copy(ConstructExpr),
}

#[derive(Clone)]
struct CellV {
    lo: f64,
    hi: f64,
    fill: Fill,
    vmin: f64,
    vmax: f64,
}

impl CellV {
    fn len(&self) -> f64 {
        self.hi - self.lo
    }
}

#[derive(Debug, Clone, Copy)]
struct PairCand {
    i: usize,
    j: usize,
    cand: Cand,
}

fn rank_of(table: &[f64], v: f64) -> usize {
    let i = table.partition_point(|&t| t < v);
    if i == 0 {
        0
    } else if i == table.len() || (v - table[i - 1]).abs() <= (table[i] - v).abs() {
        i - 1
    } else {
        i
    }
}

struct RankSink<'s> {
    table: &'s [f64],
    index: &'s HashMap<usize, Vec<(usize, f64)>>,
    scale: f64,
    out: &'s mut Vec<(usize, f64)>,
}

impl MassSink for RankSink<'_> {
    fn point(&mut self, value: f64, mass: f64) {
        self.out.push((rank_of(self.table, value), mass * self.scale));
    }

    fn whole(&mut self, node: &ConstructExpr, mass: f64) {
        let m = mass * self.scale;
        self.out.extend(self.index[&node.ptr_id()].iter().map(|&(r, w)| (r, w * m)));
    }
}

pub(crate) struct Engine<'a> {
    obj: &'a dyn Objective,
    strat: &'a dyn Strategy,
    cfg: &'a SearchConfig,
    table: Arc<[f64]>,
    index: HashMap<usize, Vec<(usize, f64)>>,
    memo: HashMap<usize, Outcome>,
    evals: AtomicU64,
    scan: Option<Mutex<Vec<ScanRow>>>,
    const_value: f64,
}

pub(crate) struct EngineResult {
    pub witness: (f64, f64),
    pub upper: f64,
    pub evaluations: u64,
    pub scan: Vec<ScanRow>,
}

impl<'a> Engine<'a> {
    pub fn new(
        root: &ConstructExpr,
        obj: &'a dyn Objective,
        strat: &'a dyn Strategy,
        cfg: &'a SearchConfig,
        scan: bool,
    ) -> Result<Self> {
        let d = root.distribution();
        obj.check_values(d.min_value(), d.max_value())?;
        let table: Arc<[f64]> = d.atoms().iter().map(|a| a.value).collect::<Vec<_>>().into();
        let mut index = HashMap::new();
        let mut stack = vec![root.clone()];
        while let Some(e) = stack.pop() {
            if index.contains_key(&e.ptr_id()) {
                continue;
            }
            let idx: Vec<(usize, f64)> =
                e.distribution().atoms().iter().map(|a| (rank_of(&table, a.value), a.weight)).collect();
            index.insert(e.ptr_id(), idx);
            stack.extend(e.children());
        }
        let const_value = obj.accumulator(&table).value_with(&[(0, 1.0)]);
        Ok(Engine {
            obj,
            strat,
            cfg,
            table,
            index,
            memo: HashMap::new(),
            evals: AtomicU64::new(0),
            scan: scan.then(|| Mutex::new(Vec::new())),
            const_value,
        })
    }

    pub fn run(mut self, root: &ConstructExpr) -> Result<EngineResult> {
        let out = self.search_node(root, root.is_circle())?;
        Ok(EngineResult {
            witness: (out.best.left, out.best.right),
            upper: out.upper,
            evaluations: self.evals.load(Ordering::Relaxed),
            scan: self.scan.map(|m| m.into_inner().unwrap()).unwrap_or_default(),
        })
    }

    fn cell_view(&self, c: crate::dag::Cell) -> CellV {
        match c.content {
            CellContent::Atom(v) => {
                CellV { lo: c.lo, hi: c.hi, fill: Fill::Atom(rank_of(&self.table, v)), vmin: v, vmax: v }
            }
            CellContent::Copy(e) => {
                let d = e.distribution();
                CellV { lo: c.lo, hi: c.hi, vmin: d.min_value(), vmax: d.max_value(), fill: Fill::Copy(e) }
            }
        }
    }

    fn add_whole(&self, acc: &mut dyn Accumulator, c: &CellV) {
        match &c.fill {
            Fill::Atom(r) => acc.add(*r, c.len()),
            Fill::Copy(e) => {
                for &(r, w) in &self.index[&e.ptr_id()] {
                    acc.add(r, w * c.len());
                }
            }
        }
    }

    /// Masses of the suffix (or prefix) of `c` covering fraction `frac`.
    fn fill_end(&self, c: &CellV, frac: f64, suffix: bool, out: &mut Vec<(usize, f64)>) -> Result<()> {
        if frac <= 0.0 {
            return Ok(());
        }
        match &c.fill {
            Fill::Atom(r) => out.push((*r, frac * c.len())),
            Fill::Copy(e) => {
                let len = c.len();
                if frac >= 1.0 {
                    out.extend(self.index[&e.ptr_id()].iter().map(|&(r, w)| (r, w * len)));
                    return Ok(());
                }
                let (c0, c1) = e.carrier();
                let w = frac * (c1 - c0);
                let (l, r) = if suffix { (c1 - w, c1) } else { (c0, c0 + w) };
                if r <= l {
                    return Ok(());
                }
                let mut sink =
                    RankSink { table: &self.table, index: &self.index, scale: len / (c1 - c0), out };
                e.accumulate(&IntervalQuery { left: l, right: r }, &mut sink)?;
            }
        }
        Ok(())
    }

    fn eval_interval(&self, node: &ConstructExpr, l: f64, r: f64, acc: &dyn Accumulator) -> Result<f64> {
        let mut out = Vec::new();
        let mut sink = RankSink { table: &self.table, index: &self.index, scale: 1.0, out: &mut out };
        node.accumulate(&IntervalQuery::new(l, r)?, &mut sink)?;
        self.evals.fetch_add(1, Ordering::Relaxed);
        Ok(acc.value_with(&out))
    }

    fn search_node(&mut self, node: &ConstructExpr, root_circle: bool) -> Result<Outcome> {
        let cells: Vec<CellV> = node.cells().into_iter().map(|c| self.cell_view(c)).collect();
        let m = cells.len();

        // children first, each searched once
        for c in &cells {
            if let Fill::Copy(e) = &c.fill {
                if !self.memo.contains_key(&e.ptr_id()) {
                    let o = self.search_node(e, false)?;
                    self.memo.insert(e.ptr_id(), o);
                }
            }
        }

        let flat = cells.iter().all(|c| matches!(c.fill, Fill::Atom(_)));
        let gap = if flat { usize::MAX } else { self.cfg.r_long.max(1) };
        let ext: Vec<CellV> = if root_circle {
            let extra = gap.min(m);
            cells
                .iter()
                .cloned()
                .chain(cells.iter().take(extra).map(|c| CellV { lo: c.lo + 1.0, hi: c.hi + 1.0, ..c.clone() }))
                .collect()
        } else {
            cells.clone()
        };

        let mut cands: Vec<Cand> = Vec::new();
        let mut upper = f64::NEG_INFINITY;
        // intervals inside one cell
        let mut seen: Vec<usize> = Vec::new();
        for c in &cells {
            match &c.fill {
                Fill::Atom(_) => {
                    cands.push(Cand { value: self.const_value, left: c.lo, right: c.hi });
                    upper = upper.max(self.const_value);
                }
                Fill::Copy(e) => {
                    if seen.contains(&e.ptr_id()) {
                        continue;
                    }
                    seen.push(e.ptr_id());
                    let o = self.memo[&e.ptr_id()];
                    let (c0, c1) = e.carrier();
                    let s = c.len() / (c1 - c0);
                    cands.push(Cand {
                        value: o.best.value,
                        left: c.lo + (o.best.left - c0) * s,
                        right: c.lo + (o.best.right - c0) * s,
                    });
                    upper = upper.max(o.upper);
                }
            }
        }
        if m >= 2 {
            let lo = cells.iter().map(|c| c.vmin).fold(f64::INFINITY, f64::min);
            let hi = cells.iter().map(|c| c.vmax).fold(f64::NEG_INFINITY, f64::max);
            upper = upper.max(self.obj.range_bound(lo, hi));
            if root_circle {
                // arcs of at least r_long periods sit within TV 2/(r_long+1) of the node law
                let tv = 2.0 / (self.cfg.r_long as f64 + 1.0);
                if let Some(b) = self.obj.tv_bound(node.distribution(), tv, lo, hi) {
                    upper = upper.max(b.min(self.obj.range_bound(lo, hi)));
                }
            }
        }

        // cell pairs
        let mut pairs: Vec<PairCand> = Vec::new();
        if m >= 2 {
            let starts = if root_circle { m } else { m - 1 };
            let phase1 = if self.strat.continuous() {
                let p = self.pair_scan(&ext, starts, gap, &super::strategy::Breakpoints, f64::NEG_INFINITY)?;
                let t = p.iter().map(|c| c.cand.value).fold(f64::NEG_INFINITY, f64::max);
                pairs.extend(p);
                t
            } else {
                f64::NEG_INFINITY
            };
            let threshold = cands.iter().map(|c| c.value).fold(phase1, f64::max);
            pairs.extend(self.pair_scan(&ext, starts, gap, self.strat, threshold)?);
        }
        cands.extend(pairs.iter().map(|p| p.cand));

        // long intervals and arcs
        let samples = self.long_samples(node, m, flat, root_circle);
        if !samples.is_empty() {
            let acc = self.obj.accumulator(&self.table);
            for (l, r) in samples {
                let v = self.eval_interval(node, l, r, acc.as_ref())?;
                cands.push(Cand { value: v, left: l, right: r });
                self.record(&[Cand { value: v, left: l, right: r }]);
            }
        }

        let vmax = cands.iter().map(|c| c.value).fold(f64::NEG_INFINITY, f64::max);
        if self.strat.continuous() && vmax.is_finite() {
            let cut = vmax - tie_tol(vmax);
            let mut tied: Vec<PairCand> = pairs.iter().filter(|p| p.cand.value >= cut).copied().collect();
            tied.sort_by(|x, y| ext[x.i].lo.total_cmp(&ext[y.i].lo).then(x.j.cmp(&y.j)));
            let mut best_left = reduce(&cands).map(|c| c.left).unwrap_or(f64::INFINITY);
            for p in tied {
                if ext[p.i].lo > best_left {
                    break;
                }
                // the pair's own optimum is reachable by its own evaluator, so a
                // much tighter target keeps the polished ends close to it
                let own = p.cand.value - POLISH_TOL * p.cand.value.abs().max(1.0);
                let hint = (ext[p.i].hi - p.cand.left) / ext[p.i].len();
                if let Some(c) = self.polish(&ext, p.i, p.j, cut.max(own), hint)? {
                    best_left = best_left.min(c.left);
                    cands.push(c);
                }
            }
        }

        let best = reduce(&cands)
            .ok_or_else(|| Error::Internal(format!("no finite candidate for {} node", node.kind_name())))?;
        Ok(Outcome { best, upper: upper.max(best.value) })
    }

    fn long_samples(&self, node: &ConstructExpr, m: usize, flat: bool, root_circle: bool) -> Vec<(f64, f64)> {
        let (c0, c1) = node.carrier();
        let span = c1 - c0;
        let n = self.cfg.grid.max(2);
        let mut out = Vec::new();
        if root_circle {
            let shortest = if flat { 1.0 } else { ((self.cfg.r_long + 1) as f64 / m as f64).min(1.0) };
            let longest = self.cfg.max_periods.max(1) as f64;
            let steps = 2 * n;
            let ratio = (longest / shortest).powf(1.0 / steps as f64);
            let phase = (self.cfg.seed as f64 * super::GOLDEN_FRACTION).fract() / n as f64;
            out.push((c0, c0 + 1.0));
            for k in 0..=steps {
                let len = shortest * ratio.powi(k as i32);
                for s in 0..n {
                    let l = c0 + s as f64 / n as f64 + phase;
                    out.push((l, l + len));
                }
            }
            for k in 2..=self.cfg.max_periods {
                out.push((c0, c0 + k as f64));
            }
        } else if !flat {
            out.push((c0, c1));
            if m > self.cfg.r_long + 1 {
                for k in 1..=n {
                    let len = span * 0.5f64.powi(k as i32);
                    for s in 0..=n {
                        let l = c0 + (span - len) * s as f64 / n as f64;
                        out.push((l, l + len));
                    }
                }
            }
        }
        out
    }

    fn record(&self, cands: &[Cand]) {
        if let Some(scan) = &self.scan {
            let mut rows = scan.lock().unwrap();
            rows.extend(cands.iter().filter(|c| c.value.is_finite()).map(|c| ScanRow {
                left: c.left,
                right: c.right,
                length: c.len(),
                value: c.value,
            }));
        }
    }

    fn pair_scan(
        &self,
        ext: &[CellV],
        starts: usize,
        gap: usize,
        strat: &dyn Strategy,
        threshold: f64,
    ) -> Result<Vec<PairCand>> {
        let per_start: Vec<Result<Vec<PairCand>>> = (0..starts)
            .into_par_iter()
            .map(|i| {
                let mut acc = self.obj.accumulator(&self.table);
                let mut out = Vec::new();
                let jmax = i.saturating_add(gap).min(ext.len() - 1);
                let (mut lo, mut hi) = (ext[i].vmin, ext[i].vmax);
                for j in i + 1..=jmax {
                    if j > i + 1 {
                        self.add_whole(acc.as_mut(), &ext[j - 1]);
                    }
                    lo = lo.min(ext[j].vmin);
                    hi = hi.max(ext[j].vmax);
                    if threshold.is_finite() && self.obj.range_bound(lo, hi) < threshold - tie_tol(threshold) {
                        continue;
                    }
                    let mut pe = PairEval::new(self, acc.as_ref(), &ext[i], &ext[j]);
                    let opt = strat.optimize(&mut |a, b| pe.eval(a, b), self.cfg);
                    let evals = pe.evals;
                    if let Some(e) = pe.err.take() {
                        return Err(e);
                    }
                    self.evals.fetch_add(evals, Ordering::Relaxed);
                    let (left, right) = pe.interval(opt.a, opt.b);
                    out.push(PairCand { i, j, cand: Cand { value: opt.value, left, right } });
                }
                Ok(out)
            })
            .collect();
        let mut all = Vec::new();
        for r in per_start {
            all.extend(r?);
        }
        let c: Vec<Cand> = all.iter().map(|p| p.cand).collect();
        self.record(&c);
        Ok(all)
    }

    /// Smallest left end for pair `(i, j)` that still reaches `cut`, with the
    /// right end placed at the best position for that left end. `hint` is a
    /// left fraction known to come close to the pair's optimum.
    fn polish(&self, ext: &[CellV], i: usize, j: usize, cut: f64, hint: f64) -> Result<Option<Cand>> {
        let mut acc = self.obj.accumulator(&self.table);
        for c in &ext[i + 1..j] {
            self.add_whole(acc.as_mut(), c);
        }
        let mut pe = PairEval::new(self, acc.as_ref(), &ext[i], &ext[j]);
        let strat = self.strat;
        let cfg = self.cfg;
        let best_b = |pe: &mut PairEval, a: f64| strat.maximize_line(&mut |b| pe.eval(a, b), cfg);
        let n = 33;
        let hint = hint.clamp(0.0, 1.0);
        let (hb, hv) = best_b(&mut pe, hint);
        let mut found = (hv >= cut).then_some((hint, hb, hv));
        let mut above: Option<f64> = None;
        for k in (0..n).rev() {
            let a = k as f64 / (n - 1) as f64;
            if found.is_some_and(|f| a <= f.0) {
                break;
            }
            let (b, v) = best_b(&mut pe, a);
            if v >= cut {
                found = Some((a, b, v));
                break;
            }
            above = Some(a);
        }
        let Some(mut feas) = found else {
            return Ok(None);
        };
        if let Some(mut hi) = above {
            for _ in 0..60 {
                let mid = 0.5 * (feas.0 + hi);
                if mid <= feas.0 || mid >= hi {
                    break;
                }
                let (b, v) = best_b(&mut pe, mid);
                if v >= cut {
                    feas = (mid, b, v);
                } else {
                    hi = mid;
                }
            }
        }
        let evals = pe.evals;
        if let Some(e) = pe.err.take() {
            return Err(e);
        }
        self.evals.fetch_add(evals, Ordering::Relaxed);
        let (left, right) = pe.interval(feas.0, feas.1);
        Ok(Some(Cand { value: feas.2, left, right }))
    }
}

/// Evaluator for one cell pair, caching the end masses.
struct PairEval<'e, 'a> {
    eng: &'e Engine<'a>,
    acc: &'e dyn Accumulator,
    ci: &'e CellV,
    cj: &'e CellV,
    left: (f64, Vec<(usize, f64)>),
    right: (f64, Vec<(usize, f64)>),
    buf: Vec<(usize, f64)>,
    err: Option<Error>,
    evals: u64,
}

impl<'e, 'a> PairEval<'e, 'a> {
    fn new(eng: &'e Engine<'a>, acc: &'e dyn Accumulator, ci: &'e CellV, cj: &'e CellV) -> Self {
        PairEval {
            eng,
            acc,
            ci,
            cj,
            left: (f64::NAN, Vec::new()),
            right: (f64::NAN, Vec::new()),
            buf: Vec::new(),
            err: None,
            evals: 0,
        }
    }

    fn interval(&self, a: f64, b: f64) -> (f64, f64) {
        (self.ci.hi - a * self.ci.len(), self.cj.lo + b * self.cj.len())
    }

    fn eval(&mut self, a: f64, b: f64) -> f64 {
        if a != self.left.0 {
            self.left.1.clear();
            if let Err(e) = self.eng.fill_end(self.ci, a, true, &mut self.left.1) {
                self.err.get_or_insert(e);
            }
            self.left.0 = a;
        }
        if b != self.right.0 {
            self.right.1.clear();
            if let Err(e) = self.eng.fill_end(self.cj, b, false, &mut self.right.1) {
                self.err.get_or_insert(e);
            }
            self.right.0 = b;
        }
        self.buf.clear();
        self.buf.extend_from_slice(&self.left.1);
        self.buf.extend_from_slice(&self.right.1);
        self.evals += 1;
        self.acc.value_with(&self.buf)
    }
}
