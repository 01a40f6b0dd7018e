//! Exact calculus for piecewise-constant functions and finite atomic
//! distributions.
//!
//! Every quantity here is a finite sum over pieces or atoms, so "exact" means
//! closed-form evaluation in binary64. Circle functions have period 1 and are
//! queried through their periodic realization, so a query interval may wrap
//! the circle any number of times.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Values closer than this (relative to `max(1, |v|)`) are one atom.
pub const MERGE_TOL: f64 = 1e-12;
/// Tolerance on the sum of distribution weights.
pub const WEIGHT_SUM_TOL: f64 = 1e-12;

pub(crate) fn same_value(a: f64, b: f64) -> bool {
    (a - b).abs() <= MERGE_TOL * 1f64.max(a.abs()).max(b.abs())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Domain {
    Interval { a: f64, b: f64 },
    Circle,
}

impl Domain {
    pub fn interval(a: f64, b: f64) -> Result<Self> {
        if !(a.is_finite() && b.is_finite()) || a >= b {
            return Err(Error::input(format!("domain: need finite a < b, got [{a}, {b}]")));
        }
        Ok(Domain::Interval { a, b })
    }

    pub fn is_circle(&self) -> bool {
        matches!(self, Domain::Circle)
    }
}

/// A query interval `[left, right]` with `left < right`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IntervalQuery {
    pub left: f64,
    pub right: f64,
}

impl IntervalQuery {
    pub fn new(left: f64, right: f64) -> Result<Self> {
        if !(left.is_finite() && right.is_finite()) {
            return Err(Error::input(format!("query: endpoints must be finite, got [{left}, {right}]")));
        }
        if left >= right {
            return Err(Error::input(format!("query: need left < right, got [{left}, {right}]")));
        }
        Ok(IntervalQuery { left, right })
    }

    pub fn len(&self) -> f64 {
        self.right - self.left
    }
}

/// Piecewise-constant function on an interval or on the unit circle.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawStep", into = "RawStep")]
pub struct StepFunction {
    domain: Domain,
    breakpoints: Vec<f64>,
    values: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct RawStep {
    domain: Domain,
    breakpoints: Vec<f64>,
    values: Vec<f64>,
}

impl TryFrom<RawStep> for StepFunction {
    type Error = Error;
    fn try_from(raw: RawStep) -> Result<Self> {
        StepFunction::new(raw.domain, raw.breakpoints, raw.values)
    }
}

impl From<StepFunction> for RawStep {
    fn from(f: StepFunction) -> Self {
        RawStep { domain: f.domain, breakpoints: f.breakpoints, values: f.values }
    }
}

impl StepFunction {
    pub fn new(domain: Domain, breakpoints: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::input("values: need at least one piece"));
        }
        if breakpoints.len() != values.len() + 1 {
            return Err(Error::input(format!(
                "breakpoints: expected {} entries for {} pieces, got {}",
                values.len() + 1,
                values.len(),
                breakpoints.len()
            )));
        }
        if let Some(v) = values.iter().find(|v| !v.is_finite()) {
            return Err(Error::input(format!("values: non-finite value {v}")));
        }
        if breakpoints.iter().any(|b| !b.is_finite()) {
            return Err(Error::input("breakpoints: non-finite entry"));
        }
        if breakpoints.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::input("breakpoints: must be strictly increasing"));
        }
        let first = breakpoints[0];
        let last = *breakpoints.last().unwrap();
        match domain {
            Domain::Interval { a, b } => {
                if a >= b {
                    return Err(Error::input("domain: need a < b"));
                }
                if first != a || last != b {
                    return Err(Error::input(format!(
                        "breakpoints: must start at {a} and end at {b}, got [{first}, {last}]"
                    )));
                }
            }
            Domain::Circle => {
                if ((last - first) - 1.0).abs() > 1e-12 {
                    return Err(Error::input(format!(
                        "breakpoints: circle function must span one period, got length {}",
                        last - first
                    )));
                }
            }
        }
        Ok(StepFunction { domain, breakpoints, values })
    }

    /// Interval-domain function from breakpoints; the domain is read off the ends.
    pub fn on_interval(breakpoints: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        let (a, b) = match (breakpoints.first(), breakpoints.last()) {
            (Some(&a), Some(&b)) => (a, b),
            _ => return Err(Error::input("breakpoints: empty")),
        };
        StepFunction::new(Domain::interval(a, b)?, breakpoints, values)
    }

    pub fn on_circle(breakpoints: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        StepFunction::new(Domain::Circle, breakpoints, values)
    }

    pub fn constant(domain: Domain, c: f64) -> Result<Self> {
        let bps = match domain {
            Domain::Interval { a, b } => vec![a, b],
            Domain::Circle => vec![0.0, 1.0],
        };
        StepFunction::new(domain, bps, vec![c])
    }

    pub fn domain(&self) -> Domain {
        self.domain
    }

    pub fn breakpoints(&self) -> &[f64] {
        &self.breakpoints
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn piece_count(&self) -> usize {
        self.values.len()
    }

    /// Carrier of one period (circle) or the whole domain (interval).
    pub fn carrier(&self) -> (f64, f64) {
        (self.breakpoints[0], *self.breakpoints.last().unwrap())
    }

    /// `(lo, hi, value)` for every piece.
    pub fn pieces(&self) -> impl Iterator<Item = (f64, f64, f64)> + '_ {
        self.breakpoints.windows(2).zip(&self.values).map(|(w, &v)| (w[0], w[1], v))
    }

    pub fn value_range(&self) -> (f64, f64) {
        self.values
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)))
    }

    pub fn check_query(&self, q: &IntervalQuery) -> Result<()> {
        if let Domain::Interval { a, b } = self.domain {
            let slack = 1e-12 * (b - a).max(1.0);
            if q.left < a - slack || q.right > b + slack {
                return Err(Error::input(format!(
                    "query: [{}, {}] is not inside the domain [{a}, {b}]",
                    q.left, q.right
                )));
            }
        }
        Ok(())
    }

    /// Length of each piece inside `q` (periodically for circle functions).
    pub fn overlaps(&self, q: &IntervalQuery) -> Result<Vec<(f64, f64)>> {
        self.check_query(q)?;
        Ok(self.overlaps_unchecked(q.left, q.right))
    }

    pub(crate) fn overlaps_unchecked(&self, l: f64, r: f64) -> Vec<(f64, f64)> {
        let mut out = Vec::new();
        match self.domain {
            Domain::Interval { .. } => {
                let start = self.piece_index(l);
                for i in start..self.values.len() {
                    let lo = self.breakpoints[i].max(l);
                    let hi = self.breakpoints[i + 1].min(r);
                    if self.breakpoints[i] >= r {
                        break;
                    }
                    if hi > lo {
                        out.push((self.values[i], hi - lo));
                    }
                }
            }
            Domain::Circle => {
                let x0 = self.breakpoints[0];
                let cum = |x: f64, i: usize| -> f64 {
                    let t = x - x0;
                    let k = t.floor();
                    let frac = t - k;
                    let lo = self.breakpoints[i] - x0;
                    let len = self.breakpoints[i + 1] - self.breakpoints[i];
                    k * len + (frac - lo).clamp(0.0, len)
                };
                for i in 0..self.values.len() {
                    let m = cum(r, i) - cum(l, i);
                    if m > 0.0 {
                        out.push((self.values[i], m));
                    }
                }
            }
        }
        out
    }

    /// Index of the piece containing `x` (interval domain, clamped).
    pub(crate) fn piece_index(&self, x: f64) -> usize {
        let n = self.values.len();
        match self.breakpoints[1..].partition_point(|&b| b <= x) {
            i if i >= n => n - 1,
            i => i,
        }
    }

    pub fn average(&self, q: &IntervalQuery) -> Result<f64> {
        let ov = self.overlaps(q)?;
        let total: f64 = ov.iter().map(|&(_, m)| m).sum();
        Ok(ov.iter().map(|&(v, m)| v * m).sum::<f64>() / total)
    }

    pub fn central_p_moment(&self, q: &IntervalQuery, p: f64) -> Result<f64> {
        check_p(p)?;
        Ok(self.distribution(q)?.central_moment(p))
    }

    pub fn distribution(&self, q: &IntervalQuery) -> Result<Distribution> {
        Distribution::from_masses(self.overlaps(q)?)
    }

    /// Distribution over the whole carrier (one period for circle functions).
    pub fn full_distribution(&self) -> Distribution {
        Distribution::from_masses(self.pieces().map(|(lo, hi, v)| (v, hi - lo)))
            .expect("a valid step function has positive total length")
    }

    /// `sum length_i * exp(c * v_i)` over the pieces inside `q`.
    pub fn exp_integral(&self, q: &IntervalQuery, c: f64) -> Result<f64> {
        Ok(self.overlaps(q)?.iter().map(|&(v, m)| m * (c * v).exp()).sum())
    }

    /// Affine copy of an interval function onto `target`.
    pub fn transfer(&self, target: &IntervalQuery) -> Result<StepFunction> {
        let (a, b) = match self.domain {
            Domain::Interval { a, b } => (a, b),
            Domain::Circle => return Err(Error::input("transfer: acts on interval functions only")),
        };
        if a == target.left && b == target.right {
            return Ok(self.clone());
        }
        let scale = target.len() / (b - a);
        let n = self.breakpoints.len();
        let mut bps: Vec<f64> =
            self.breakpoints.iter().map(|&x| target.left + (x - a) * scale).collect();
        bps[0] = target.left;
        bps[n - 1] = target.right;
        if bps.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::input("transfer: target too short to separate the pieces in binary64"));
        }
        StepFunction::new(Domain::interval(target.left, target.right)?, bps, self.values.clone())
    }

    /// Interval function equal to (the periodic realization of) `self` on `q`.
    pub fn restrict(&self, q: &IntervalQuery) -> Result<StepFunction> {
        self.check_query(q)?;
        let mut bps = vec![q.left];
        let mut vals = Vec::new();
        let push = |hi: f64, v: f64, bps: &mut Vec<f64>, vals: &mut Vec<f64>| {
            if hi > *bps.last().unwrap() {
                bps.push(hi);
                vals.push(v);
            }
        };
        match self.domain {
            Domain::Interval { .. } => {
                for (lo, hi, v) in self.pieces() {
                    if hi <= q.left || lo >= q.right {
                        continue;
                    }
                    push(hi.min(q.right), v, &mut bps, &mut vals);
                }
            }
            Domain::Circle => {
                let x0 = self.breakpoints[0];
                let mut shift = (q.left - x0).floor();
                'outer: loop {
                    for (lo, hi, v) in self.pieces() {
                        let (lo, hi) = (lo + shift, hi + shift);
                        if hi <= q.left {
                            continue;
                        }
                        if lo >= q.right {
                            break 'outer;
                        }
                        push(hi.min(q.right), v, &mut bps, &mut vals);
                    }
                    shift += 1.0;
                }
            }
        }
        *bps.last_mut().unwrap() = q.right;
        StepFunction::on_interval(bps, vals)
    }

    /// Pointwise `g(f)`; the piece structure is kept.
    pub fn compose_monotone(&self, g: &MonotoneMap) -> StepFunction {
        StepFunction {
            domain: self.domain,
            breakpoints: self.breakpoints.clone(),
            values: self.values.iter().map(|&v| g.apply(v)).collect(),
        }
    }

    /// Pieces reordered so that values are nondecreasing.
    pub fn monotone_rearrangement(&self) -> Result<StepFunction> {
        let (a, b) = match self.domain {
            Domain::Interval { a, b } => (a, b),
            Domain::Circle => {
                return Err(Error::input("monotone_rearrangement: needs an interval domain"))
            }
        };
        if self.values.windows(2).all(|w| w[0] <= w[1]) {
            return Ok(self.clone());
        }
        let mut pieces: Vec<(f64, f64)> = self.pieces().map(|(lo, hi, v)| (v, hi - lo)).collect();
        pieces.sort_by(|x, y| x.0.total_cmp(&y.0));
        let mut bps = Vec::with_capacity(pieces.len() + 1);
        let mut x = a;
        bps.push(a);
        for &(_, len) in &pieces[..pieces.len() - 1] {
            x += len;
            bps.push(x);
        }
        bps.push(b);
        StepFunction::new(self.domain, bps, pieces.into_iter().map(|(v, _)| v).collect())
    }

    /// Same function with every value multiplied by `s`.
    pub fn scaled(&self, s: f64) -> StepFunction {
        StepFunction {
            domain: self.domain,
            breakpoints: self.breakpoints.clone(),
            values: self.values.iter().map(|v| v * s).collect(),
        }
    }

    /// Adjacent pieces with equal values joined.
    pub fn merged(&self) -> StepFunction {
        let mut bps = vec![self.breakpoints[0]];
        let mut vals: Vec<f64> = Vec::new();
        for (_, hi, v) in self.pieces() {
            if vals.last() == Some(&v) {
                *bps.last_mut().unwrap() = hi;
            } else {
                vals.push(v);
                bps.push(hi);
            }
        }
        StepFunction { domain: self.domain, breakpoints: bps, values: vals }
    }

    /// Circle function with this interval function as its period, rescaled to [0,1).
    pub fn periodize(&self) -> Result<StepFunction> {
        let unit = IntervalQuery::new(0.0, 1.0)?;
        let f = match self.domain {
            Domain::Circle => return Ok(self.clone()),
            Domain::Interval { .. } => self.transfer(&unit)?,
        };
        StepFunction::on_circle(f.breakpoints, f.values)
    }
}

pub(crate) fn check_p(p: f64) -> Result<()> {
    if !(p >= 1.0 && p.is_finite()) {
        return Err(Error::input(format!("p: need finite p >= 1, got {p}")));
    }
    Ok(())
}

/// Nondecreasing piecewise-linear map given by knots, extended linearly past
/// the first and last knot with the slopes of the end segments.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MonotoneMap {
    knots: Vec<(f64, f64)>,
}

impl MonotoneMap {
    pub fn new(knots: Vec<(f64, f64)>) -> Result<Self> {
        if knots.len() < 2 {
            return Err(Error::input("knots: need at least two knots"));
        }
        if knots.iter().any(|(x, y)| !x.is_finite() || !y.is_finite()) {
            return Err(Error::input("knots: non-finite entry"));
        }
        if knots.windows(2).any(|w| w[0].0 >= w[1].0) {
            return Err(Error::input("knots: x coordinates must be strictly increasing"));
        }
        if knots.windows(2).any(|w| w[0].1 > w[1].1) {
            return Err(Error::input("knots: map must be nondecreasing"));
        }
        Ok(MonotoneMap { knots })
    }

    pub fn identity() -> Self {
        MonotoneMap { knots: vec![(0.0, 0.0), (1.0, 1.0)] }
    }

    /// `x -> min(x, n)`.
    pub fn truncation(n: f64) -> Self {
        MonotoneMap { knots: vec![(n - 1.0, n - 1.0), (n, n), (n + 1.0, n)] }
    }

    pub fn knots(&self) -> &[(f64, f64)] {
        &self.knots
    }

    /// Largest segment slope.
    pub fn lipschitz(&self) -> f64 {
        self.knots
            .windows(2)
            .map(|w| (w[1].1 - w[0].1) / (w[1].0 - w[0].0))
            .fold(0.0, f64::max)
    }

    pub fn apply(&self, x: f64) -> f64 {
        let k = &self.knots;
        let seg = match k.partition_point(|&(kx, _)| kx <= x) {
            0 => 0,
            i if i >= k.len() => k.len() - 2,
            i => i - 1,
        };
        let (x0, y0) = k[seg];
        let (x1, y1) = k[seg + 1];
        y0 + (x - x0) * (y1 - y0) / (x1 - x0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Atom {
    pub value: f64,
    pub weight: f64,
}

/// Finite atomic probability measure on the line, atoms sorted by value.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawDist")]
pub struct Distribution {
    atoms: Vec<Atom>,
}

#[derive(Deserialize)]
struct RawDist {
    atoms: Vec<Atom>,
}

impl TryFrom<RawDist> for Distribution {
    type Error = Error;
    fn try_from(raw: RawDist) -> Result<Self> {
        Distribution::from_atoms(raw.atoms)
    }
}

impl Distribution {
    pub fn delta(value: f64) -> Self {
        Distribution { atoms: vec![Atom { value, weight: 1.0 }] }
    }

    /// Validated constructor: positive weights summing to one.
    pub fn from_atoms(atoms: Vec<Atom>) -> Result<Self> {
        if atoms.is_empty() {
            return Err(Error::input("atoms: empty distribution"));
        }
        if let Some(a) = atoms.iter().find(|a| !a.value.is_finite()) {
            return Err(Error::input(format!("atoms: non-finite value {}", a.value)));
        }
        if let Some(a) = atoms.iter().find(|a| !(a.weight > 0.0 && a.weight.is_finite())) {
            return Err(Error::input(format!("atoms: weight must be positive, got {}", a.weight)));
        }
        let total: f64 = atoms.iter().map(|a| a.weight).sum();
        if (total - 1.0).abs() > WEIGHT_SUM_TOL * atoms.len().max(1) as f64 {
            return Err(Error::input(format!("atoms: weights sum to {total}, expected 1")));
        }
        Distribution::from_masses(atoms.into_iter().map(|a| (a.value, a.weight)))
    }

    /// Normalized distribution of nonnegative `(value, mass)` pairs; equal
    /// values are merged and zero masses dropped.
    pub fn from_masses<I: IntoIterator<Item = (f64, f64)>>(masses: I) -> Result<Self> {
        let mut pairs: Vec<(f64, f64)> = masses.into_iter().filter(|&(_, m)| m > 0.0).collect();
        if pairs.iter().any(|(v, m)| !v.is_finite() || !m.is_finite()) {
            return Err(Error::input("atoms: non-finite value or mass"));
        }
        let total: f64 = pairs.iter().map(|&(_, m)| m).sum();
        if !(total > 0.0) {
            return Err(Error::input("atoms: total mass must be positive"));
        }
        pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
        let mut atoms: Vec<Atom> = Vec::with_capacity(pairs.len());
        for (v, m) in pairs {
            match atoms.last_mut() {
                Some(last) if same_value(last.value, v) => last.weight += m,
                _ => atoms.push(Atom { value: v, weight: m }),
            }
        }
        for a in &mut atoms {
            a.weight /= total;
        }
        Ok(Distribution { atoms })
    }

    pub fn atoms(&self) -> &[Atom] {
        &self.atoms
    }

    pub fn len(&self) -> usize {
        self.atoms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }

    pub fn is_delta(&self) -> bool {
        self.atoms.len() == 1
    }

    pub fn min_value(&self) -> f64 {
        self.atoms[0].value
    }

    pub fn max_value(&self) -> f64 {
        self.atoms[self.atoms.len() - 1].value
    }

    pub fn barycenter(&self) -> f64 {
        self.atoms.iter().map(|a| a.value * a.weight).sum()
    }

    pub fn central_moment(&self, p: f64) -> f64 {
        let m = self.barycenter();
        if p == 1.0 {
            return self.atoms.iter().map(|a| a.weight * (a.value - m).abs()).sum();
        }
        if p == 2.0 {
            return self.atoms.iter().map(|a| a.weight * (a.value - m) * (a.value - m)).sum();
        }
        self.atoms.iter().map(|a| a.weight * (a.value - m).abs().powf(p)).sum()
    }

    pub fn expectation(&self, f: impl Fn(f64) -> f64) -> f64 {
        self.atoms.iter().map(|a| a.weight * f(a.value)).sum()
    }

    pub fn all_positive(&self) -> bool {
        self.atoms.iter().all(|a| a.value > 0.0)
    }

    /// `(1 - alpha) * self + alpha * other`.
    pub fn mix(&self, other: &Distribution, alpha: f64) -> Result<Distribution> {
        if !(0.0..=1.0).contains(&alpha) {
            return Err(Error::input(format!("alpha: must lie in [0,1], got {alpha}")));
        }
        if alpha == 0.0 {
            return Ok(self.clone());
        }
        if alpha == 1.0 {
            return Ok(other.clone());
        }
        Distribution::from_masses(
            self.atoms
                .iter()
                .map(|a| (a.value, (1.0 - alpha) * a.weight))
                .chain(other.atoms.iter().map(|a| (a.value, alpha * a.weight))),
        )
    }

    /// Half the l1 distance between weight vectors over the union of atoms.
    pub fn tv_distance(&self, other: &Distribution) -> f64 {
        let (a, b) = (&self.atoms, &other.atoms);
        let (mut i, mut j) = (0, 0);
        let mut sum = 0.0;
        while i < a.len() || j < b.len() {
            if i < a.len() && j < b.len() && same_value(a[i].value, b[j].value) {
                sum += (a[i].weight - b[j].weight).abs();
                i += 1;
                j += 1;
            } else if j >= b.len() || (i < a.len() && a[i].value < b[j].value) {
                sum += a[i].weight;
                i += 1;
            } else {
                sum += b[j].weight;
                j += 1;
            }
        }
        (0.5 * sum).min(1.0)
    }

    pub fn eval(&self, functional: &DistFunctional) -> Result<f64> {
        functional.eval(self)
    }
}

/// Scalar functionals of a distribution.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DistFunctional {
    Barycenter,
    CentralMoment { p: f64 },
    ExpIntegral { c: f64 },
    TailMass { lambda: f64 },
    PowerMean { q: f64 },
    ApForm { p: f64 },
    AInfForm,
    ReverseHolder { q: f64 },
}

impl DistFunctional {
    pub fn eval(&self, d: &Distribution) -> Result<f64> {
        use DistFunctional::*;
        let need_positive = |name: &str| -> Result<()> {
            if d.all_positive() {
                Ok(())
            } else {
                Err(Error::input(format!("{name}: all atoms must be positive")))
            }
        };
        Ok(match *self {
            Barycenter => d.barycenter(),
            CentralMoment { p } => {
                check_p(p)?;
                d.central_moment(p)
            }
            ExpIntegral { c } => d.expectation(|t| (c * t).exp()),
            TailMass { lambda } => {
                if !(lambda > 0.0) {
                    return Err(Error::input(format!("lambda: must be positive, got {lambda}")));
                }
                let m = d.barycenter();
                let cut = lambda * (1.0 - MERGE_TOL);
                d.atoms.iter().filter(|a| (a.value - m).abs() >= cut).map(|a| a.weight).sum()
            }
            PowerMean { q } => {
                if q == 0.0 || !q.is_finite() {
                    return Err(Error::input("q: power mean needs finite nonzero q"));
                }
                need_positive("power_mean")?;
                d.expectation(|t| t.powf(q)).powf(1.0 / q)
            }
            ApForm { p } => {
                if !(p > 1.0) {
                    return Err(Error::input(format!("p: A_p needs p > 1, got {p}")));
                }
                need_positive("ap_form")?;
                let e = -1.0 / (p - 1.0);
                d.barycenter() * d.expectation(|t| t.powf(e)).powf(p - 1.0)
            }
            AInfForm => {
                need_positive("a_inf_form")?;
                d.barycenter() * (-d.expectation(f64::ln)).exp()
            }
            ReverseHolder { q } => {
                if !(q > 1.0) {
                    return Err(Error::input(format!("q: reverse Holder needs q > 1, got {q}")));
                }
                need_positive("reverse_holder")?;
                d.expectation(|t| t.powf(q)).powf(1.0 / q) / d.barycenter()
            }
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sign_step() -> StepFunction {
        StepFunction::on_interval(vec![-1.0, 0.0, 1.0], vec![-1.0, 1.0]).unwrap()
    }

    fn split_quarter() -> StepFunction {
        StepFunction::on_interval(vec![0.0, 0.75, 1.0], vec![0.0, 1.0]).unwrap()
    }

    fn q(l: f64, r: f64) -> IntervalQuery {
        IntervalQuery::new(l, r).unwrap()
    }

    #[test]
    fn sign_step_average_and_moment() {
        let f = sign_step();
        assert_eq!(f.average(&q(-1.0, 1.0)).unwrap(), 0.0);
        assert_eq!(f.central_p_moment(&q(-1.0, 1.0), 2.0).unwrap(), 1.0);
        let d = f.distribution(&q(-1.0, 1.0)).unwrap();
        assert_eq!(d.atoms(), &[Atom { value: -1.0, weight: 0.5 }, Atom { value: 1.0, weight: 0.5 }]);
        assert!(f.distribution(&q(0.0, 1.0)).unwrap().is_delta());
    }

    #[test]
    fn log_piece_average() {
        let (a, b): (f64, f64) = (1.0 / std::f64::consts::E, 1.0);
        let v = (b * (b.ln() - 1.0) - a * (a.ln() - 1.0)) / (b - a);
        assert!((v - (-0.418023)).abs() < 1e-6);
    }

    #[test]
    fn quarter_split_moment_and_distribution() {
        let f = split_quarter();
        assert!((f.central_p_moment(&q(0.5, 1.0), 1.0).unwrap() - 0.5).abs() < 1e-15);
        let d = f.distribution(&q(0.5, 1.0)).unwrap();
        assert_eq!(d.len(), 2);
        assert!((d.atoms()[0].weight - 0.5).abs() < 1e-15);
    }

    #[test]
    fn constant_function_has_no_oscillation() {
        let f = StepFunction::constant(Domain::interval(0.0, 3.0).unwrap(), 2.5).unwrap();
        assert_eq!(f.average(&q(0.2, 1.7)).unwrap(), 2.5);
        for p in [1.0, 1.5, 2.0, 3.0] {
            assert_eq!(f.central_p_moment(&q(0.2, 1.7), p).unwrap(), 0.0);
        }
    }

    #[test]
    fn query_errors() {
        let f = sign_step();
        assert!(IntervalQuery::new(1.0, 0.0).is_err());
        assert!(f.average(&q(-2.0, 0.0)).is_err());
        assert!(f.central_p_moment(&q(-1.0, 1.0), 0.5).is_err());
    }

    #[test]
    fn circle_long_arcs() {
        let f = StepFunction::on_circle(vec![0.0, 0.5, 1.0], vec![1.0, -1.0]).unwrap();
        // two and a half periods starting mid-way through the +1 piece
        let d = f.distribution(&q(0.25, 2.75)).unwrap();
        assert!((d.atoms()[0].weight - 0.5).abs() < 1e-15);
        let d = f.distribution(&q(-3.25, -2.0)).unwrap();
        // one full period plus [-3.25,-3], which sits in the -1 piece
        assert!((d.atoms()[0].weight - 0.6).abs() < 1e-12);
    }

    #[test]
    fn transfer_rescales() {
        let f = sign_step();
        assert_eq!(f.transfer(&q(-1.0, 1.0)).unwrap(), f);
        let g = f.transfer(&q(0.0, 1.0)).unwrap();
        assert_eq!(g.breakpoints(), &[0.0, 0.5, 1.0]);
        assert_eq!(g.values(), &[-1.0, 1.0]);
        let circ = f.periodize().unwrap();
        assert!(circ.transfer(&q(0.0, 1.0)).is_err());
    }

    #[test]
    fn monotone_maps() {
        let f = sign_step();
        assert_eq!(f.compose_monotone(&MonotoneMap::identity()), f);
        let t = f.compose_monotone(&MonotoneMap::truncation(0.0));
        assert_eq!(t.values(), &[-1.0, 0.0]);
        assert_eq!(MonotoneMap::truncation(0.0).lipschitz(), 1.0);
        assert!(MonotoneMap::new(vec![(0.0, 1.0), (1.0, 0.0)]).is_err());
        assert!(MonotoneMap::new(vec![(1.0, 0.0), (0.0, 1.0)]).is_err());
        let g = MonotoneMap::new(vec![(0.0, 0.0), (1.0, 3.0), (2.0, 3.5)]).unwrap();
        assert_eq!(g.lipschitz(), 3.0);
        assert_eq!(g.apply(-1.0), -3.0);
        assert_eq!(g.apply(4.0), 4.5);
    }

    #[test]
    fn rearrangement() {
        let f = sign_step();
        assert_eq!(f.monotone_rearrangement().unwrap(), f);
        let g = StepFunction::on_interval(vec![0.0, 0.2, 0.7, 1.0], vec![3.0, -1.0, 2.0]).unwrap();
        let r = g.monotone_rearrangement().unwrap();
        assert_eq!(r.values(), &[-1.0, 2.0, 3.0]);
        assert!(g.full_distribution().tv_distance(&r.full_distribution()) < 1e-15);
    }

    #[test]
    fn functionals() {
        let d = Distribution::from_masses([(-1.0, 0.5), (1.0, 0.5)]).unwrap();
        assert_eq!(DistFunctional::CentralMoment { p: 2.0 }.eval(&d).unwrap(), 1.0);
        let w = Distribution::from_masses([(2.0, 0.5), (0.5, 0.5)]).unwrap();
        assert!((DistFunctional::ApForm { p: 2.0 }.eval(&w).unwrap() - 25.0 / 16.0).abs() < 1e-15);
        let c = Distribution::delta(0.7);
        assert_eq!(DistFunctional::ExpIntegral { c: 1.3 }.eval(&c).unwrap(), (1.3f64 * 0.7).exp());
        assert!(DistFunctional::ApForm { p: 2.0 }.eval(&d).is_err());
        assert!(DistFunctional::PowerMean { q: 2.0 }.eval(&d).is_err());
        assert_eq!(DistFunctional::TailMass { lambda: 1.0 }.eval(&d).unwrap(), 1.0);
        assert_eq!(DistFunctional::ExpIntegral { c: 1e6 }.eval(&c).unwrap(), f64::INFINITY);
    }

    #[test]
    fn mixing() {
        let d0 = Distribution::delta(0.0);
        let d1 = Distribution::delta(1.0);
        assert_eq!(d0.mix(&d1, 0.0).unwrap(), d0);
        let m = d0.mix(&d1, 0.25).unwrap();
        assert_eq!(m.atoms(), &[Atom { value: 0.0, weight: 0.75 }, Atom { value: 1.0, weight: 0.25 }]);
        assert_eq!(m.tv_distance(&m), 0.0);
        assert_eq!(d0.tv_distance(&d1), 1.0);
        assert!(d0.mix(&d1, 1.5).is_err());
    }

    #[test]
    fn distribution_validation() {
        assert!(Distribution::from_atoms(vec![Atom { value: 0.0, weight: 0.6 }]).is_err());
        assert!(Distribution::from_atoms(vec![
            Atom { value: 0.0, weight: 1.5 },
            Atom { value: 1.0, weight: -0.5 }
        ])
        .is_err());
        let merged = Distribution::from_atoms(vec![
            Atom { value: 1.0, weight: 0.5 },
            Atom { value: 1.0 + 1e-14, weight: 0.5 },
        ])
        .unwrap();
        assert!(merged.is_delta());
    }

    #[test]
    fn json_round_trip() {
        let f = split_quarter();
        let s = serde_json::to_string(&f).unwrap();
        assert!(s.contains("\"kind\":\"interval\""));
        let back: StepFunction = serde_json::from_str(&s).unwrap();
        assert_eq!(back, f);
        let bad = r#"{"domain":{"kind":"circle"},"breakpoints":[0,0.5],"values":[1]}"#;
        assert!(serde_json::from_str::<StepFunction>(bad).is_err());
    }

    #[test]
    fn restriction() {
        let f = StepFunction::on_circle(vec![0.0, 0.5, 1.0], vec![1.0, -1.0]).unwrap();
        let r = f.restrict(&q(0.25, 1.75)).unwrap();
        assert_eq!(r.values(), &[1.0, -1.0, 1.0, -1.0]);
        assert_eq!(r.breakpoints(), &[0.25, 0.5, 1.0, 1.5, 1.75]);
    }
}
