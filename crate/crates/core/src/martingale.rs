//! Simple martingales: structure checks, hull membership sweeps, the lift of
//! point martingales to measure martingales, the compiler to circle
//! functions, and the staircase factories.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dag::{ConstructExpr, DEFAULT_LAMBDA_HOM};
use crate::error::{Error, Result};
use crate::measure::{Distribution, StepFunction, WEIGHT_SUM_TOL};
use crate::search::objective::golden_max;
use crate::search::SearchConfig;

/// Leaves must sit on the boundary curve within this distance.
pub const CURVE_TOL: f64 = 1e-10;
/// Martingale identity tolerance (TV for measures, distance for points).
pub const MARTINGALE_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TreeNode<V> {
    pub value: V,
    #[serde(default = "Vec::new", skip_serializing_if = "Vec::is_empty")]
    pub children: Vec<Edge<V>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Edge<V> {
    pub prob: f64,
    pub node: TreeNode<V>,
}

impl<V> TreeNode<V> {
    pub fn leaf(value: V) -> Self {
        TreeNode { value, children: Vec::new() }
    }

    pub fn is_leaf(&self) -> bool {
        self.children.is_empty()
    }

    pub fn depth(&self) -> usize {
        self.children.iter().map(|e| e.node.depth() + 1).max().unwrap_or(0)
    }

    pub fn node_count(&self) -> usize {
        1 + self.children.iter().map(|e| e.node.node_count()).sum::<usize>()
    }

    /// Every node with its path of child indices, parents before children.
    pub fn walk(&self) -> Vec<(Vec<usize>, &TreeNode<V>)> {
        let mut out = vec![(Vec::new(), self)];
        let mut k = 0;
        while k < out.len() {
            let (path, node) = (out[k].0.clone(), out[k].1);
            for (i, e) in node.children.iter().enumerate() {
                let mut p = path.clone();
                p.push(i);
                out.push((p, &e.node));
            }
            k += 1;
        }
        out
    }
}

pub type Point = [f64; 2];

/// Finite simple martingale, point-valued or measure-valued.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum MartingaleTree {
    Point { root: TreeNode<Point> },
    Measure { root: TreeNode<Distribution> },
}

fn path_str(p: &[usize]) -> String {
    format!("{p:?}")
}

fn check_probs<V>(path: &[usize], node: &TreeNode<V>) -> Result<()> {
    let mut total = 0.0;
    for e in &node.children {
        if !(e.prob > 0.0 && e.prob.is_finite()) {
            return Err(Error::input(format!(
                "martingale: node {} has non-positive transition probability {}",
                path_str(path),
                e.prob
            )));
        }
        total += e.prob;
    }
    if (total - 1.0).abs() > WEIGHT_SUM_TOL * node.children.len() as f64 {
        return Err(Error::input(format!(
            "martingale: node {} transition probabilities sum to {total}",
            path_str(path)
        )));
    }
    Ok(())
}

/// `sum prob_i * child_i` as a distribution.
pub fn children_mixture(node: &TreeNode<Distribution>) -> Result<Distribution> {
    Distribution::from_masses(
        node.children
            .iter()
            .flat_map(|e| e.node.value.atoms().iter().map(move |a| (a.value, e.prob * a.weight))),
    )
}

fn children_barycenter(node: &TreeNode<Point>) -> Point {
    node.children.iter().fold([0.0, 0.0], |acc, e| {
        [acc[0] + e.prob * e.node.value[0], acc[1] + e.prob * e.node.value[1]]
    })
}

impl MartingaleTree {
    pub fn is_measure(&self) -> bool {
        matches!(self, MartingaleTree::Measure { .. })
    }

    pub fn depth(&self) -> usize {
        match self {
            MartingaleTree::Point { root } => root.depth(),
            MartingaleTree::Measure { root } => root.depth(),
        }
    }

    pub fn node_count(&self) -> usize {
        match self {
            MartingaleTree::Point { root } => root.node_count(),
            MartingaleTree::Measure { root } => root.node_count(),
        }
    }

    pub fn measure_root(&self) -> Option<&TreeNode<Distribution>> {
        match self {
            MartingaleTree::Measure { root } => Some(root),
            MartingaleTree::Point { .. } => None,
        }
    }

    /// Transition probabilities and the martingale identity at every node.
    pub fn check_structure(&self) -> Result<()> {
        match self {
            MartingaleTree::Measure { root } => {
                for (path, node) in root.walk() {
                    if node.is_leaf() {
                        continue;
                    }
                    check_probs(&path, node)?;
                    let tv = node.value.tv_distance(&children_mixture(node)?);
                    if tv > MARTINGALE_TOL {
                        return Err(Error::input(format!(
                            "martingale: node {} differs from the mixture of its children (TV {tv:e})",
                            path_str(&path)
                        )));
                    }
                }
            }
            MartingaleTree::Point { root } => {
                for (path, node) in root.walk() {
                    if node.value.iter().any(|x| !x.is_finite()) {
                        return Err(Error::input(format!("martingale: node {} has a non-finite point", path_str(&path))));
                    }
                    if node.is_leaf() {
                        continue;
                    }
                    check_probs(&path, node)?;
                    let b = children_barycenter(node);
                    let scale = node.value[0].abs().max(node.value[1].abs()).max(1.0);
                    let dist = (b[0] - node.value[0]).hypot(b[1] - node.value[1]);
                    if dist > MARTINGALE_TOL * scale {
                        return Err(Error::input(format!(
                            "martingale: node {} is not the barycenter of its children (distance {dist:e})",
                            path_str(&path)
                        )));
                    }
                }
            }
        }
        Ok(())
    }
}

/// Domains whose strict membership the children hulls must satisfy.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum MembershipDomain {
    /// Measures with central p-moment below `eps^p`.
    BmoP { p: f64, eps: f64 },
    /// Positive measures with A_p form below `c`.
    MuckenhouptAp { p: f64, c: f64 },
    /// Points with `x1^2 <= x2 < x1^2 + eps^2`.
    ParabolaStrip { eps: f64 },
    /// Points with `x2 < c * x1^{-1/(p-1)}` above the curve `x2 = x1^{-1/(p-1)}`.
    PowerCurveStrip { p: f64, c: f64 },
}

impl MembershipDomain {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::input(m));
        match *self {
            MembershipDomain::BmoP { p, eps } => {
                if !(p >= 1.0 && p.is_finite()) {
                    return bad(format!("p: BmoP needs p >= 1, got {p}"));
                }
                if !(eps > 0.0 && eps.is_finite()) {
                    return bad(format!("eps: must be positive, got {eps}"));
                }
            }
            MembershipDomain::MuckenhouptAp { p, c } | MembershipDomain::PowerCurveStrip { p, c } => {
                if !(p > 1.0 && p.is_finite()) {
                    return bad(format!("p: needs p > 1, got {p}"));
                }
                if !(c > 1.0 && c.is_finite()) {
                    return bad(format!("C: needs C > 1, got {c}"));
                }
            }
            MembershipDomain::ParabolaStrip { eps } => {
                if !(eps > 0.0 && eps.is_finite()) {
                    return bad(format!("eps: must be positive, got {eps}"));
                }
            }
        }
        Ok(())
    }

    fn is_measure(&self) -> bool {
        matches!(self, MembershipDomain::BmoP { .. } | MembershipDomain::MuckenhouptAp { .. })
    }

    /// Signed membership functional of a measure; negative means inside.
    pub fn measure_margin(&self, d: &Distribution) -> Result<f64> {
        match *self {
            MembershipDomain::BmoP { p, eps } => Ok(d.central_moment(p) - eps.powf(p)),
            MembershipDomain::MuckenhouptAp { p, c } => {
                Ok(crate::measure::DistFunctional::ApForm { p }.eval(d)? - c)
            }
            _ => Err(Error::input("domain: point domain used on a measure")),
        }
    }

    /// Signed membership functional of a point; negative means inside.
    pub fn point_margin(&self, x: Point) -> Result<f64> {
        match *self {
            MembershipDomain::ParabolaStrip { eps } => Ok(x[1] - x[0] * x[0] - eps * eps),
            MembershipDomain::PowerCurveStrip { p, c } => {
                if !(x[0] > 0.0) {
                    return Err(Error::input(format!("point: power curve strip needs x1 > 0, got {}", x[0])));
                }
                Ok(x[1] - c * x[0].powf(-1.0 / (p - 1.0)))
            }
            _ => Err(Error::input("domain: measure domain used on a point")),
        }
    }

    /// Closed-form maximum of the (concave) point functional on a segment.
    fn segment_max(&self, a: Point, b: Point) -> Result<f64> {
        let d = [b[0] - a[0], b[1] - a[1]];
        let at = |t: f64| [a[0] + t * d[0], a[1] + t * d[1]];
        let mut best = self.point_margin(a)?.max(self.point_margin(b)?);
        let t = match *self {
            MembershipDomain::ParabolaStrip { .. } if d[0] != 0.0 => {
                Some((d[1] - 2.0 * a[0] * d[0]) / (2.0 * d[0] * d[0]))
            }
            MembershipDomain::PowerCurveStrip { p, c } if d[0] != 0.0 => {
                let r = 1.0 / (p - 1.0);
                let q = -d[1] / (c * r * d[0]);
                (q > 0.0).then(|| (q.powf(-1.0 / (r + 1.0)) - a[0]) / d[0])
            }
            _ => None,
        };
        if let Some(t) = t {
            if t > 0.0 && t < 1.0 {
                best = best.max(self.point_margin(at(t))?);
            }
        }
        Ok(best)
    }
}

/// Embedded boundary of the point domains.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum BoundaryCurve {
    /// `x -> (x, x^2)`.
    Parabola,
    /// `u -> (u, u^{-1/(p-1)})`, `u > 0`.
    PowerCurve { p: f64 },
}

impl BoundaryCurve {
    pub fn embed(&self, u: f64) -> Point {
        match *self {
            BoundaryCurve::Parabola => [u, u * u],
            BoundaryCurve::PowerCurve { p } => [u, u.powf(-1.0 / (p - 1.0))],
        }
    }

    /// Curve parameter of a point on the curve.
    pub fn param(&self, x: Point) -> Result<f64> {
        if let BoundaryCurve::PowerCurve { p } = *self {
            if !(p > 1.0) {
                return Err(Error::input(format!("p: power curve needs p > 1, got {p}")));
            }
            if !(x[0] > 0.0) {
                return Err(Error::input(format!("point: ({}, {}) is off the power curve", x[0], x[1])));
            }
        }
        let y = self.embed(x[0]);
        let gap = (y[1] - x[1]).abs();
        if !(gap <= CURVE_TOL * y[1].abs().max(1.0)) {
            return Err(Error::input(format!(
                "point: ({}, {}) is off the boundary curve by {gap:e}",
                x[0], x[1]
            )));
        }
        Ok(x[0])
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NodeMargin {
    pub path: Vec<usize>,
    /// Maximum of the membership functional over the children hull; strict
    /// membership means negative.
    pub worst_margin: f64,
    /// Interiors of hulls with three or more children are sampled, not swept.
    pub sampled: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub pass: bool,
    /// Largest node margin; negative on pass.
    pub worst_margin: f64,
    /// Distance to the boundary, `-worst_margin`.
    pub slack: f64,
    pub offending_path: Option<Vec<usize>>,
    /// Leaves that are not in the terminal set (non-delta, or off the curve).
    pub bad_leaves: Vec<Vec<usize>>,
    pub nodes: Vec<NodeMargin>,
}

/// Checks that every children hull stays strictly inside `dom` and that
/// leaves are terminal (delta measures, or points on the domain's curve).
pub fn validate_membership(
    m: &MartingaleTree,
    dom: &MembershipDomain,
    cfg: &SearchConfig,
) -> Result<ValidationReport> {
    dom.validate()?;
    cfg.validate()?;
    m.check_structure()?;
    if m.is_measure() != dom.is_measure() {
        return Err(Error::input("domain: martingale kind does not match the membership domain"));
    }
    let (nodes, bad_leaves): (Vec<NodeMargin>, Vec<Vec<usize>>) = match m {
        MartingaleTree::Measure { root } => {
            let walk = root.walk();
            let bad = walk.iter().filter(|(_, n)| n.is_leaf() && !n.value.is_delta()).map(|(p, _)| p.clone()).collect();
            let internal: Vec<_> = walk.into_iter().filter(|(_, n)| !n.is_leaf()).collect();
            let margins: Result<Vec<NodeMargin>> = internal
                .par_iter()
                .map(|(path, node)| measure_hull_margin(path, node, dom, cfg))
                .collect();
            (margins?, bad)
        }
        MartingaleTree::Point { root } => {
            let curve = match *dom {
                MembershipDomain::ParabolaStrip { .. } => BoundaryCurve::Parabola,
                MembershipDomain::PowerCurveStrip { p, .. } => BoundaryCurve::PowerCurve { p },
                _ => unreachable!("kind checked above"),
            };
            let walk = root.walk();
            let bad = walk
                .iter()
                .filter(|(_, n)| n.is_leaf() && curve.param(n.value).is_err())
                .map(|(p, _)| p.clone())
                .collect();
            let internal: Vec<_> = walk.into_iter().filter(|(_, n)| !n.is_leaf()).collect();
            let margins: Result<Vec<NodeMargin>> = internal
                .par_iter()
                .map(|(path, node)| point_hull_margin(path, node, dom, cfg))
                .collect();
            (margins?, bad)
        }
    };
    let worst = nodes
        .iter()
        .fold(None::<&NodeMargin>, |acc, n| match acc {
            Some(a) if a.worst_margin >= n.worst_margin => Some(a),
            _ => Some(n),
        });
    let worst_margin = worst.map(|n| n.worst_margin).unwrap_or(f64::NEG_INFINITY);
    let pass = worst_margin < 0.0 && bad_leaves.is_empty();
    let offending_path = if worst_margin >= 0.0 {
        worst.map(|n| n.path.clone())
    } else {
        bad_leaves.first().cloned()
    };
    Ok(ValidationReport { pass, worst_margin, slack: -worst_margin, offending_path, bad_leaves, nodes })
}

/// Barycentric weights for hull interiors: the full lattice of resolution
/// `res` when small, seeded random points otherwise.
fn interior_weights(n: usize, res: usize, seed: u64) -> Vec<Vec<f64>> {
    const CAP: usize = 20_000;
    fn count(n: usize, res: usize) -> f64 {
        // C(res + n - 1, n - 1)
        (1..n).fold(1.0, |acc, k| acc * (res + k) as f64 / k as f64)
    }
    let mut out = Vec::new();
    if count(n, res) <= CAP as f64 {
        fn rec(n: usize, left: usize, res: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<f64>>) {
            if cur.len() == n - 1 {
                cur.push(left);
                if cur.iter().all(|&c| c > 0) {
                    out.push(cur.iter().map(|&c| c as f64 / res as f64).collect());
                }
                cur.pop();
                return;
            }
            for c in 0..=left {
                cur.push(c);
                rec(n, left - c, res, cur, out);
                cur.pop();
            }
        }
        rec(n, res, res, &mut Vec::new(), &mut out);
    } else {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for _ in 0..CAP {
            let e: Vec<f64> = (0..n).map(|_| -rng.gen_range(f64::EPSILON..1.0f64).ln()).collect();
            let s: f64 = e.iter().sum();
            out.push(e.into_iter().map(|x| x / s).collect());
        }
    }
    out
}

fn measure_hull_margin(
    path: &[usize],
    node: &TreeNode<Distribution>,
    dom: &MembershipDomain,
    cfg: &SearchConfig,
) -> Result<NodeMargin> {
    let kids: Vec<&Distribution> = node.children.iter().map(|e| &e.node.value).collect();
    let mut worst = f64::NEG_INFINITY;
    for d in &kids {
        worst = worst.max(dom.measure_margin(d)?);
    }
    let grid = 20 * cfg.grid.max(2);
    let width = (cfg.tol * 1e-4).max(1e-13);
    let mut err = None;
    for i in 0..kids.len() {
        for j in i + 1..kids.len() {
            let mut f = |t: f64| match kids[i].mix(kids[j], t).and_then(|d| dom.measure_margin(&d)) {
                Ok(v) => v,
                Err(e) => {
                    err.get_or_insert(e);
                    f64::NAN
                }
            };
            let mut best = (0.0, f64::NEG_INFINITY);
            for k in 0..=grid {
                let t = k as f64 / grid as f64;
                let v = f(t);
                if v > best.1 {
                    best = (t, v);
                }
            }
            let h = 1.0 / grid as f64;
            let (_, v) = golden_max(&mut f, (best.0 - h).max(0.0), (best.0 + h).min(1.0), width);
            worst = worst.max(best.1).max(v);
        }
    }
    if let Some(e) = err {
        return Err(e);
    }
    let sampled = kids.len() >= 3;
    if sampled {
        for w in interior_weights(kids.len(), cfg.grid.max(2) * 2, cfg.seed) {
            let d = Distribution::from_masses(
                kids.iter()
                    .zip(&w)
                    .flat_map(|(d, &wk)| d.atoms().iter().map(move |a| (a.value, wk * a.weight))),
            )?;
            worst = worst.max(dom.measure_margin(&d)?);
        }
    }
    Ok(NodeMargin { path: path.to_vec(), worst_margin: worst, sampled })
}

fn point_hull_margin(
    path: &[usize],
    node: &TreeNode<Point>,
    dom: &MembershipDomain,
    cfg: &SearchConfig,
) -> Result<NodeMargin> {
    let kids: Vec<Point> = node.children.iter().map(|e| e.node.value).collect();
    let mut worst = f64::NEG_INFINITY;
    for &x in &kids {
        worst = worst.max(dom.point_margin(x)?);
    }
    for i in 0..kids.len() {
        for j in i + 1..kids.len() {
            worst = worst.max(dom.segment_max(kids[i], kids[j])?);
        }
    }
    let sampled = kids.len() >= 3;
    if sampled {
        for w in interior_weights(kids.len(), cfg.grid.max(2) * 2, cfg.seed) {
            let x = kids.iter().zip(&w).fold([0.0, 0.0], |acc, (k, &wk)| [acc[0] + wk * k[0], acc[1] + wk * k[1]]);
            worst = worst.max(dom.point_margin(x)?);
        }
    }
    Ok(NodeMargin { path: path.to_vec(), worst_margin: worst, sampled })
}

/// Measure-valued martingale whose barycenters under `curve` reproduce the
/// point martingale.
pub fn lift(m: &MartingaleTree, curve: &BoundaryCurve) -> Result<MartingaleTree> {
    let MartingaleTree::Point { root } = m else {
        return Err(Error::input("martingale: lift needs a point-valued tree"));
    };
    m.check_structure()?;
    fn rec(node: &TreeNode<Point>, curve: &BoundaryCurve, path: &mut Vec<usize>) -> Result<TreeNode<Distribution>> {
        if node.is_leaf() {
            let u = curve.param(node.value).map_err(|e| {
                Error::input(format!("martingale: leaf {} is off the curve ({e})", path_str(path)))
            })?;
            return Ok(TreeNode::leaf(Distribution::delta(u)));
        }
        let mut children = Vec::with_capacity(node.children.len());
        for (i, e) in node.children.iter().enumerate() {
            path.push(i);
            children.push(Edge { prob: e.prob, node: rec(&e.node, curve, path)? });
            path.pop();
        }
        let mut out = TreeNode { value: Distribution::delta(0.0), children };
        out.value = children_mixture(&out)?;
        Ok(out)
    }
    Ok(MartingaleTree::Measure { root: rec(root, curve, &mut Vec::new())? })
}

/// Barycenter of a measure under the curve embedding.
pub fn embedded_barycenter(d: &Distribution, curve: &BoundaryCurve) -> Point {
    d.atoms().iter().fold([0.0, 0.0], |acc, a| {
        let y = curve.embed(a.value);
        [acc[0] + a.weight * y[0], acc[1] + a.weight * y[1]]
    })
}

/// Homogenization parameters for one depth of the compiler.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HomParams {
    pub lambda_hom: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub levels: Option<usize>,
}

impl Default for HomParams {
    fn default() -> Self {
        HomParams { lambda_hom: DEFAULT_LAMBDA_HOM, levels: None }
    }
}

/// Per-depth schedule; depths past the list use `default`.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Schedule {
    #[serde(default)]
    pub default: HomParams,
    #[serde(default)]
    pub per_depth: Vec<HomParams>,
}

impl Schedule {
    pub fn uniform(lambda_hom: f64, levels: Option<usize>) -> Self {
        Schedule { default: HomParams { lambda_hom, levels }, per_depth: Vec::new() }
    }

    pub fn at(&self, depth: usize) -> HomParams {
        self.per_depth.get(depth).copied().unwrap_or(self.default)
    }
}

/// Folds the martingale into glued circle functions; the result's
/// distribution is the root measure.
pub fn compile_to_circle(m: &MartingaleTree, schedule: &Schedule) -> Result<ConstructExpr> {
    let MartingaleTree::Measure { root } = m else {
        return Err(Error::input("martingale: compile needs a measure-valued tree"));
    };
    m.check_structure()?;
    fn rec(node: &TreeNode<Distribution>, depth: usize, s: &Schedule, path: &mut Vec<usize>) -> Result<ConstructExpr> {
        if node.is_leaf() {
            if !node.value.is_delta() {
                return Err(Error::input(format!("martingale: leaf {} is not a delta measure", path_str(path))));
            }
            return ConstructExpr::constant(node.value.min_value());
        }
        let hp = s.at(depth);
        path.push(0);
        let mut acc = rec(&node.children[0].node, depth + 1, s, path)?;
        path.pop();
        let mut total = node.children[0].prob;
        for (i, e) in node.children.iter().enumerate().skip(1) {
            path.push(i);
            let child = rec(&e.node, depth + 1, s, path)?;
            path.pop();
            let alpha = e.prob / (total + e.prob);
            acc = ConstructExpr::glue(acc, child, alpha, hp.lambda_hom, hp.levels)?;
            total += e.prob;
        }
        Ok(acc)
    }
    let e = rec(root, 0, schedule, &mut Vec::new())?;
    Ok(if e.is_circle() { e } else { ConstructExpr::periodize(e) })
}

fn check_staircase(lambda: f64, n: usize) -> Result<()> {
    if !(lambda > 1.0 && lambda.is_finite()) {
        return Err(Error::input(format!("lambda: staircase needs lambda > 1, got {lambda}")));
    }
    if n < 1 {
        return Err(Error::input("depth: N must be at least 1"));
    }
    if lambda.powi(-(n as i32)) <= 0.0 {
        return Err(Error::input("depth: lambda^-N underflows"));
    }
    Ok(())
}

/// Breakpoints `0, λ^-N, ..., λ^-1, 1`.
fn staircase_breakpoints(lambda: f64, n: usize) -> Vec<f64> {
    let mut b = vec![0.0];
    b.extend((0..n).rev().map(|k| lambda.powi(-((k + 1) as i32))));
    b.push(1.0);
    b
}

/// `<log x>` over `[a, b]`, `a > 0`.
pub fn log_average(a: f64, b: f64) -> f64 {
    (b * (b.ln() - 1.0) - a * (a.ln() - 1.0)) / (b - a)
}

/// `<x^alpha>` over `[a, b]`, `a >= 0`.
pub fn power_average(alpha: f64, a: f64, b: f64) -> f64 {
    (b.powf(alpha + 1.0) - a.powf(alpha + 1.0)) / ((alpha + 1.0) * (b - a))
}

/// Staircase martingale: the tail at level `n` splits into `δ_{v_{n+1}}` with
/// weight `1 - 1/λ` and the next tail with weight `1/λ`. `values[k-1]` is the
/// value on `I_k`; `tail` is the value on `[0, λ^-N]`.
fn staircase_martingale(lambda: f64, values: &[f64], tail: f64) -> Result<MartingaleTree> {
    let q = 1.0 / lambda;
    let mut node = TreeNode::leaf(Distribution::delta(tail));
    for &v in values.iter().rev() {
        let value = Distribution::delta(v).mix(&node.value, q)?;
        node = TreeNode {
            value,
            children: vec![
                Edge { prob: 1.0 - q, node: TreeNode::leaf(Distribution::delta(v)) },
                Edge { prob: q, node },
            ],
        };
    }
    Ok(MartingaleTree::Measure { root: node })
}

/// The log staircase `φ_{λ,N}` on `[0, 1]` with its martingale.
pub fn log_staircase(lambda: f64, n: usize) -> Result<(StepFunction, MartingaleTree)> {
    check_staircase(lambda, n)?;
    let b = staircase_breakpoints(lambda, n);
    let tail = -(n as f64) * lambda.ln();
    let mut values = vec![tail];
    values.extend(b[1..].windows(2).map(|w| log_average(w[0], w[1])));
    let f = StepFunction::on_interval(b, values.clone())?;
    // values on I_1, ..., I_N
    let steps: Vec<f64> = values[1..].iter().rev().copied().collect();
    Ok((f, staircase_martingale(lambda, &steps, tail)?))
}

/// `ψ_{λ,n}` on `[0, s]`: the staircase below `λ^-n`, the constant `<log>_{I_n}` above.
pub fn psi_truncated(lambda: f64, big_n: usize, n: usize, s: f64) -> Result<StepFunction> {
    check_staircase(lambda, big_n)?;
    if n < 1 || n > big_n {
        return Err(Error::input(format!("n: must lie in 1..={big_n}, got {n}")));
    }
    let cut = lambda.powi(-(n as i32));
    if !(s >= cut) || !s.is_finite() {
        return Err(Error::input(format!("s: must be at least lambda^-n = {cut}, got {s}")));
    }
    let (f, _) = log_staircase(lambda, big_n)?;
    let k = big_n - n + 1; // breakpoints[k] == λ^-n
    let mut bps: Vec<f64> = f.breakpoints()[..=k].to_vec();
    bps[k] = cut;
    let mut vals: Vec<f64> = f.values()[..k].to_vec();
    if s > cut {
        bps.push(s);
        vals.push(log_average(cut, cut * lambda));
    }
    StepFunction::on_interval(bps, vals)
}

/// Power-weight staircase: `<x^alpha>` on each `I_k`, the average over
/// `[0, λ^-N]` on the tail.
pub fn power_staircase(alpha: f64, p: f64, lambda: f64, n: usize) -> Result<(StepFunction, MartingaleTree)> {
    check_staircase(lambda, n)?;
    if !(p > 1.0 && p.is_finite()) {
        return Err(Error::input(format!("p: needs p > 1, got {p}")));
    }
    if !(alpha > -1.0 && -alpha / (p - 1.0) > -1.0) {
        return Err(Error::input(format!(
            "alpha: need alpha > -1 and -alpha/(p-1) > -1 for integrability, got alpha = {alpha}, p = {p}"
        )));
    }
    let b = staircase_breakpoints(lambda, n);
    let tail = b[1].powf(alpha) / (alpha + 1.0);
    let mut values = vec![tail];
    values.extend(b[1..].windows(2).map(|w| power_average(alpha, w[0], w[1])));
    let f = StepFunction::on_interval(b, values.clone())?;
    let steps: Vec<f64> = values[1..].iter().rev().copied().collect();
    Ok((f, staircase_martingale(lambda, &steps, tail)?))
}

/// Random recombining point martingale with leaves on `curve`; internal
/// nodes are barycenters of their children.
pub fn random_point_tree(curve: &BoundaryCurve, depth: usize, seed: u64) -> TreeNode<Point> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    fn rec(curve: &BoundaryCurve, depth: usize, rng: &mut ChaCha8Rng) -> TreeNode<Point> {
        let u = match curve {
            BoundaryCurve::Parabola => rng.gen_range(-2.0..2.0),
            BoundaryCurve::PowerCurve { .. } => rng.gen_range(0.2..3.0),
        };
        if depth == 0 || rng.gen_bool(0.25) {
            return TreeNode::leaf(curve.embed(u));
        }
        let k = rng.gen_range(2..=3);
        let raw: Vec<f64> = (0..k).map(|_| rng.gen_range(0.1..1.0)).collect();
        let s: f64 = raw.iter().sum();
        let children: Vec<Edge<Point>> =
            raw.iter().map(|w| Edge { prob: w / s, node: rec(curve, depth - 1, rng) }).collect();
        let value = children_barycenter(&TreeNode { value: [0.0, 0.0], children: children.clone() });
        TreeNode { value, children }
    }
    rec(curve, depth, &mut rng)
}
