//! Interval objectives: BMO_p oscillation, the A_p form and the A_inf form.
//!
//! Each objective supplies an accumulator over a sorted atom table so that
//! the pair engine can add whole cells once and evaluate many end positions
//! cheaply.

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::measure::{DistFunctional, Distribution};

/// Running masses indexed by rank in a sorted table of atom values.
pub trait Accumulator: Send {
    fn add(&mut self, rank: usize, mass: f64);
    fn clear(&mut self);
    /// Objective value of the accumulated masses plus `extras`; `-inf` when
    /// the total mass vanishes.
    fn value_with(&self, extras: &[(usize, f64)]) -> f64;
}

pub trait Objective: Send + Sync {
    fn name(&self) -> String;
    /// Exact value on a distribution.
    fn value_of(&self, d: &Distribution) -> Result<f64>;
    /// Rejects value ranges the objective is undefined on.
    fn check_values(&self, lo: f64, hi: f64) -> Result<()>;
    fn accumulator(&self, table: &Arc<[f64]>) -> Box<dyn Accumulator>;
    /// Value of `(1 - theta) δ_lo + theta δ_hi`.
    fn two_point(&self, lo: f64, hi: f64, theta: f64) -> f64;
    /// Supremum over all distributions supported in `[lo, hi]`.
    ///
    /// The objectives here are convex in the distribution at fixed mean, so
    /// the supremum is attained by two-point laws on the endpoints.
    fn range_bound(&self, lo: f64, hi: f64) -> f64 {
        if hi <= lo {
            return self.two_point(lo, lo, 0.0);
        }
        let (_, v) = max_on_unit(|t| self.two_point(lo, hi, t), 64);
        v
    }
    /// Bound for a distribution within total variation `tv` of `center`, all
    /// atoms in `[lo, hi]`, when the objective has one.
    fn tv_bound(&self, _center: &Distribution, _tv: f64, _lo: f64, _hi: f64) -> Option<f64> {
        None
    }
}

/// Grid plus golden-section maximization of `f` on `[0, 1]`.
pub(crate) fn max_on_unit(f: impl Fn(f64) -> f64, grid: usize) -> (f64, f64) {
    let mut best = (0.0, f(0.0));
    for k in 1..=grid {
        let t = k as f64 / grid as f64;
        let v = f(t);
        if v > best.1 {
            best = (t, v);
        }
    }
    let h = 1.0 / grid as f64;
    let (lo, hi) = ((best.0 - h).max(0.0), (best.0 + h).min(1.0));
    let (t, v) = golden_max(&f, lo, hi, 1e-12);
    if v > best.1 {
        (t, v)
    } else {
        best
    }
}

pub(crate) const INV_PHI: f64 = 0.618_033_988_749_894_8;

/// Golden-section search for a maximum of `f` on `[lo, hi]`.
pub(crate) fn golden_max(mut f: impl FnMut(f64) -> f64, mut lo: f64, mut hi: f64, width: f64) -> (f64, f64) {
    let mut x1 = hi - INV_PHI * (hi - lo);
    let mut x2 = lo + INV_PHI * (hi - lo);
    let (mut f1, mut f2) = (f(x1), f(x2));
    while hi - lo > width {
        if f1 >= f2 {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - INV_PHI * (hi - lo);
            f1 = f(x1);
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + INV_PHI * (hi - lo);
            f2 = f(x2);
        }
    }
    if f1 >= f2 {
        (x1, f1)
    } else {
        (x2, f2)
    }
}

struct Fenwick(Vec<f64>);

impl Fenwick {
    fn new(n: usize) -> Self {
        Fenwick(vec![0.0; n + 1])
    }
    fn add(&mut self, i: usize, v: f64) {
        let mut i = i + 1;
        while i < self.0.len() {
            self.0[i] += v;
            i += i & i.wrapping_neg();
        }
    }
    /// Sum of the first `k` entries.
    fn prefix(&self, k: usize) -> f64 {
        let mut i = k;
        let mut s = 0.0;
        while i > 0 {
            s += self.0[i];
            i -= i & i.wrapping_neg();
        }
        s
    }
    fn clear(&mut self) {
        self.0.iter_mut().for_each(|x| *x = 0.0);
    }
}

/// BMO_p seminorm value `(<|t - <t>|^p>)^{1/p}`.
#[derive(Debug, Clone)]
pub struct BmoObjective {
    p: f64,
    /// `max_theta theta (1-theta)^p + (1-theta) theta^p`.
    two_point_peak: f64,
}

impl BmoObjective {
    pub fn new(p: f64) -> Result<Self> {
        if !(p >= 1.0 && p.is_finite()) {
            return Err(Error::input(format!("p: BMO_p needs p >= 1, got {p}")));
        }
        let h = |t: f64| t * (1.0 - t).powf(p) + (1.0 - t) * t.powf(p);
        let (_, peak) = max_on_unit(h, 1000);
        Ok(BmoObjective { p, two_point_peak: peak })
    }

    pub fn p(&self) -> f64 {
        self.p
    }
}

impl Objective for BmoObjective {
    fn name(&self) -> String {
        format!("bmo(p={})", self.p)
    }

    fn value_of(&self, d: &Distribution) -> Result<f64> {
        Ok(d.central_moment(self.p).powf(1.0 / self.p))
    }

    fn check_values(&self, _lo: f64, _hi: f64) -> Result<()> {
        Ok(())
    }

    fn accumulator(&self, table: &Arc<[f64]>) -> Box<dyn Accumulator> {
        if self.p == 1.0 {
            Box::new(AbsDevAcc {
                table: table.clone(),
                mass: Fenwick::new(table.len()),
                first: Fenwick::new(table.len()),
                total: 0.0,
                sum: 0.0,
            })
        } else if self.p == 2.0 {
            let (lo, hi) = (table[0], table[table.len() - 1]);
            Box::new(VarAcc { table: table.clone(), shift: 0.5 * (lo + hi), s: [0.0; 3] })
        } else {
            Box::new(PowAcc { table: table.clone(), p: self.p, mass: vec![0.0; table.len()], touched: vec![] })
        }
    }

    fn two_point(&self, lo: f64, hi: f64, theta: f64) -> f64 {
        let d = hi - lo;
        let h = theta * (1.0 - theta).powf(self.p) + (1.0 - theta) * theta.powf(self.p);
        d * h.powf(1.0 / self.p)
    }

    fn range_bound(&self, lo: f64, hi: f64) -> f64 {
        (hi - lo) * self.two_point_peak.powf(1.0 / self.p)
    }

    fn tv_bound(&self, center: &Distribution, tv: f64, lo: f64, hi: f64) -> Option<f64> {
        let d = hi - lo;
        let m = center.central_moment(self.p) + tv * 2f64.powf(self.p + 1.0) * d.powf(self.p);
        Some(m.powf(1.0 / self.p))
    }
}

struct AbsDevAcc {
    table: Arc<[f64]>,
    mass: Fenwick,
    first: Fenwick,
    total: f64,
    sum: f64,
}

impl Accumulator for AbsDevAcc {
    fn add(&mut self, rank: usize, mass: f64) {
        self.mass.add(rank, mass);
        self.first.add(rank, mass * self.table[rank]);
        self.total += mass;
        self.sum += mass * self.table[rank];
    }

    fn clear(&mut self) {
        self.mass.clear();
        self.first.clear();
        self.total = 0.0;
        self.sum = 0.0;
    }

    fn value_with(&self, extras: &[(usize, f64)]) -> f64 {
        let mut total = self.total;
        let mut sum = self.sum;
        for &(r, m) in extras {
            total += m;
            sum += m * self.table[r];
        }
        if total <= 0.0 {
            return f64::NEG_INFINITY;
        }
        let mean = sum / total;
        let k = self.table.partition_point(|&t| t < mean);
        let mut below = self.mass.prefix(k);
        let mut below_sum = self.first.prefix(k);
        for &(r, m) in extras {
            if r < k {
                below += m;
                below_sum += m * self.table[r];
            }
        }
        (2.0 * (mean * below - below_sum) / total).max(0.0)
    }
}

struct VarAcc {
    table: Arc<[f64]>,
    shift: f64,
    s: [f64; 3],
}

impl Accumulator for VarAcc {
    fn add(&mut self, rank: usize, mass: f64) {
        let t = self.table[rank] - self.shift;
        self.s[0] += mass;
        self.s[1] += mass * t;
        self.s[2] += mass * t * t;
    }

    fn clear(&mut self) {
        self.s = [0.0; 3];
    }

    fn value_with(&self, extras: &[(usize, f64)]) -> f64 {
        let mut s = self.s;
        for &(r, m) in extras {
            let t = self.table[r] - self.shift;
            s[0] += m;
            s[1] += m * t;
            s[2] += m * t * t;
        }
        if s[0] <= 0.0 {
            return f64::NEG_INFINITY;
        }
        let mean = s[1] / s[0];
        (s[2] / s[0] - mean * mean).max(0.0).sqrt()
    }
}

struct PowAcc {
    table: Arc<[f64]>,
    p: f64,
    mass: Vec<f64>,
    touched: Vec<usize>,
}

impl Accumulator for PowAcc {
    fn add(&mut self, rank: usize, mass: f64) {
        if self.mass[rank] == 0.0 {
            self.touched.push(rank);
        }
        self.mass[rank] += mass;
    }

    fn clear(&mut self) {
        for &r in &self.touched {
            self.mass[r] = 0.0;
        }
        self.touched.clear();
    }

    fn value_with(&self, extras: &[(usize, f64)]) -> f64 {
        let iter = || {
            self.touched
                .iter()
                .map(|&r| (r, self.mass[r]))
                .chain(extras.iter().copied())
        };
        let (total, sum) = iter().fold((0.0, 0.0), |(m, s), (r, w)| (m + w, s + w * self.table[r]));
        if total <= 0.0 {
            return f64::NEG_INFINITY;
        }
        let mean = sum / total;
        let dev: f64 = iter().map(|(r, w)| w * (self.table[r] - mean).abs().powf(self.p)).sum();
        (dev / total).powf(1.0 / self.p)
    }
}

/// Muckenhoupt form `<w><w^{-1/(p-1)}>^{p-1}`.
#[derive(Debug, Clone)]
pub struct ApObjective {
    p: f64,
}

impl ApObjective {
    pub fn new(p: f64) -> Result<Self> {
        if !(p > 1.0 && p.is_finite()) {
            return Err(Error::input(format!("p: A_p needs p > 1, got {p}")));
        }
        Ok(ApObjective { p })
    }
}

fn check_positive(lo: f64) -> Result<()> {
    if lo > 0.0 {
        Ok(())
    } else {
        Err(Error::input(format!("values: weights must be positive, found {lo}")))
    }
}

impl Objective for ApObjective {
    fn name(&self) -> String {
        format!("ap(p={})", self.p)
    }

    fn value_of(&self, d: &Distribution) -> Result<f64> {
        DistFunctional::ApForm { p: self.p }.eval(d)
    }

    fn check_values(&self, lo: f64, _hi: f64) -> Result<()> {
        check_positive(lo)
    }

    fn accumulator(&self, table: &Arc<[f64]>) -> Box<dyn Accumulator> {
        let e = -1.0 / (self.p - 1.0);
        let p = self.p;
        Box::new(PairFeatureAcc::new(table, move |t| t.powf(e), move |m, g| m * g.powf(p - 1.0)))
    }

    fn two_point(&self, lo: f64, hi: f64, theta: f64) -> f64 {
        let e = -1.0 / (self.p - 1.0);
        let m = (1.0 - theta) * lo + theta * hi;
        let g = (1.0 - theta) * lo.powf(e) + theta * hi.powf(e);
        m * g.powf(self.p - 1.0)
    }
}

/// `<w> exp(-<log w>)`.
#[derive(Debug, Clone, Default)]
pub struct AInfObjective;

impl Objective for AInfObjective {
    fn name(&self) -> String {
        "ainf".into()
    }

    fn value_of(&self, d: &Distribution) -> Result<f64> {
        DistFunctional::AInfForm.eval(d)
    }

    fn check_values(&self, lo: f64, _hi: f64) -> Result<()> {
        check_positive(lo)
    }

    fn accumulator(&self, table: &Arc<[f64]>) -> Box<dyn Accumulator> {
        Box::new(PairFeatureAcc::new(table, f64::ln, |m, l| m * (-l).exp()))
    }

    fn two_point(&self, lo: f64, hi: f64, theta: f64) -> f64 {
        let m = (1.0 - theta) * lo + theta * hi;
        m * (-((1.0 - theta) * lo.ln() + theta * hi.ln())).exp()
    }
}

/// Objectives of the form `combine(<t>, <g(t)>)`.
struct PairFeatureAcc {
    table: Arc<[f64]>,
    g: Vec<f64>,
    combine: Box<dyn Fn(f64, f64) -> f64 + Send>,
    s: [f64; 3],
}

impl PairFeatureAcc {
    fn new(
        table: &Arc<[f64]>,
        g: impl Fn(f64) -> f64,
        combine: impl Fn(f64, f64) -> f64 + Send + 'static,
    ) -> Self {
        PairFeatureAcc {
            g: table.iter().map(|&t| g(t)).collect(),
            table: table.clone(),
            combine: Box::new(combine),
            s: [0.0; 3],
        }
    }
}

impl Accumulator for PairFeatureAcc {
    fn add(&mut self, rank: usize, mass: f64) {
        self.s[0] += mass;
        self.s[1] += mass * self.table[rank];
        self.s[2] += mass * self.g[rank];
    }

    fn clear(&mut self) {
        self.s = [0.0; 3];
    }

    fn value_with(&self, extras: &[(usize, f64)]) -> f64 {
        let mut s = self.s;
        for &(r, m) in extras {
            s[0] += m;
            s[1] += m * self.table[r];
            s[2] += m * self.g[r];
        }
        if s[0] <= 0.0 {
            return f64::NEG_INFINITY;
        }
        (self.combine)(s[1] / s[0], s[2] / s[0])
    }
}

type ObjectiveCtor = fn(Option<f64>) -> Result<Box<dyn Objective>>;

fn need_p(p: Option<f64>, name: &str) -> Result<f64> {
    p.ok_or_else(|| Error::input(format!("p: objective {name} needs --p")))
}

const OBJECTIVES: &[(&str, ObjectiveCtor)] = &[
    ("bmo", |p| Ok(Box::new(BmoObjective::new(need_p(p, "bmo")?)?))),
    ("ap", |p| Ok(Box::new(ApObjective::new(need_p(p, "ap")?)?))),
    ("ainf", |_| Ok(Box::new(AInfObjective))),
];

/// Registered objective names.
pub fn objective_names() -> Vec<&'static str> {
    OBJECTIVES.iter().map(|(n, _)| *n).collect()
}

/// Looks an objective up by name; `p` parameterizes `bmo` and `ap`.
pub fn objective(name: &str, p: Option<f64>) -> Result<Box<dyn Objective>> {
    match OBJECTIVES.iter().find(|(n, _)| *n == name) {
        Some((_, ctor)) => ctor(p),
        None => Err(Error::input(format!(
            "objective: unknown name {name:?}, expected one of {:?}",
            objective_names()
        ))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn table(v: &[f64]) -> Arc<[f64]> {
        v.to_vec().into()
    }

    #[test]
    fn accumulators_match_exact_values() {
        let t = table(&[-1.0, 0.25, 0.5, 2.0, 3.5]);
        let masses = [(0usize, 0.3), (1, 0.1), (3, 0.25), (4, 0.05)];
        let extras = [(2usize, 0.2), (0, 0.1)];
        let d = Distribution::from_masses(
            masses.iter().chain(extras.iter()).map(|&(r, m)| (t[r], m)),
        )
        .unwrap();
        for p in [1.0, 2.0, 3.0, 1.5] {
            let o = BmoObjective::new(p).unwrap();
            let mut acc = o.accumulator(&t);
            for &(r, m) in &masses {
                acc.add(r, m);
            }
            let exact = o.value_of(&d).unwrap();
            assert!((acc.value_with(&extras) - exact).abs() < 1e-12, "p={p}");
            acc.clear();
            assert_eq!(acc.value_with(&[]), f64::NEG_INFINITY);
        }
        let tp = table(&[0.5, 1.0, 2.0, 4.0]);
        let d = Distribution::from_masses([(0.5, 0.2), (2.0, 0.5), (4.0, 0.3)]).unwrap();
        for o in [objective("ap", Some(2.0)).unwrap(), objective("ap", Some(3.0)).unwrap(), objective("ainf", None).unwrap()] {
            let mut acc = o.accumulator(&tp);
            acc.add(0, 0.2);
            acc.add(2, 0.5);
            assert!((acc.value_with(&[(3, 0.3)]) - o.value_of(&d).unwrap()).abs() < 1e-12);
        }
    }

    #[test]
    fn range_bounds() {
        let b1 = BmoObjective::new(1.0).unwrap();
        assert!((b1.range_bound(-1.0, 1.0) - 1.0).abs() < 1e-15);
        let b2 = BmoObjective::new(2.0).unwrap();
        assert!((b2.range_bound(0.0, 3.0) - 1.5).abs() < 1e-12);
        // A_2 two-point peak is (1 + r)^2 / (4 r) at theta = 1/2
        let a2 = ApObjective::new(2.0).unwrap();
        assert!((a2.range_bound(0.5, 2.0) - 25.0 / 16.0).abs() < 1e-12);
        // range bounds dominate random distributions on the same support
        let b3 = BmoObjective::new(3.0).unwrap();
        for k in 1..20 {
            let w = k as f64 / 20.0;
            let d = Distribution::from_masses([(0.0, w), (0.4, 0.1), (1.0, 1.0 - w)]).unwrap();
            assert!(b3.value_of(&d).unwrap() <= b3.range_bound(0.0, 1.0) + 1e-15);
        }
    }

    #[test]
    fn registry_lookup() {
        assert_eq!(objective_names(), vec!["bmo", "ap", "ainf"]);
        assert!(objective("bmo", None).is_err());
        assert!(objective("nope", Some(1.0)).is_err());
        assert_eq!(objective("ap", Some(2.0)).unwrap().name(), "ap(p=2)");
    }
}
