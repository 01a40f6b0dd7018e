//! Per-cell-pair optimizers.
//!
//! A cell pair `(i, j)` fixes the whole cells strictly between them; the
//! interval is then parameterized by `a`, the fraction of cell `i` taken as a
//! suffix, and `b`, the fraction of cell `j` taken as a prefix.

use super::objective::golden_max;
use super::SearchConfig;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PairOpt {
    pub value: f64,
    pub a: f64,
    pub b: f64,
}

pub trait Strategy: Send + Sync {
    fn name(&self) -> &'static str;
    /// Maximizes `f` over `[0, 1]^2`.
    fn optimize(&self, f: &mut dyn FnMut(f64, f64) -> f64, cfg: &SearchConfig) -> PairOpt;
    /// Maximizes `f` over `[0, 1]`, returning `(argmax, max)`.
    fn maximize_line(&self, f: &mut dyn FnMut(f64) -> f64, cfg: &SearchConfig) -> (f64, f64);
    /// Whether end positions range over a continuum; tie-break polishing
    /// only applies then.
    fn continuous(&self) -> bool;
}

/// Refinements must beat the incumbent by more than rounding noise, so
/// exact grid optima (often interval endpoints) are kept.
fn improves(new: f64, old: f64) -> bool {
    new > old + 1e-14 * old.abs().max(1.0)
}

fn golden_width(cfg: &SearchConfig) -> f64 {
    (cfg.tol * 1e-4).max(1e-13)
}

fn grid_line(f: &mut dyn FnMut(f64) -> f64, n: usize) -> (f64, f64) {
    let mut best = (0.0, f64::NEG_INFINITY);
    for k in 0..n {
        let t = k as f64 / (n - 1) as f64;
        let v = f(t);
        if v > best.1 {
            best = (t, v);
        }
    }
    best
}

/// Breakpoint-pair intervals only: both end cells taken whole.
#[derive(Debug, Default)]
pub struct Breakpoints;

impl Strategy for Breakpoints {
    fn name(&self) -> &'static str {
        "breakpoints"
    }

    fn optimize(&self, f: &mut dyn FnMut(f64, f64) -> f64, _cfg: &SearchConfig) -> PairOpt {
        PairOpt { value: f(1.0, 1.0), a: 1.0, b: 1.0 }
    }

    fn maximize_line(&self, f: &mut dyn FnMut(f64) -> f64, _cfg: &SearchConfig) -> (f64, f64) {
        (1.0, f(1.0))
    }

    fn continuous(&self) -> bool {
        false
    }
}

/// Grid over both end fractions, then coordinate-wise golden-section
/// refinement from the three best grid points.
#[derive(Debug, Default)]
pub struct GridRefine;

impl Strategy for GridRefine {
    fn name(&self) -> &'static str {
        "grid-refine"
    }

    fn optimize(&self, f: &mut dyn FnMut(f64, f64) -> f64, cfg: &SearchConfig) -> PairOpt {
        let n = cfg.grid.max(2);
        let step = 1.0 / (n - 1) as f64;
        let mut pts: Vec<PairOpt> = Vec::with_capacity(n * n);
        for i in 0..n {
            for j in 0..n {
                let (a, b) = (i as f64 * step, j as f64 * step);
                pts.push(PairOpt { value: f(a, b), a, b });
            }
        }
        // stable sort keeps grid order among equal values
        pts.sort_by(|x, y| y.value.total_cmp(&x.value));
        let mut best = pts[0];
        if !best.value.is_finite() && best.value < 0.0 {
            return best;
        }
        let width = golden_width(cfg);
        for start in pts.iter().take(3).copied() {
            let mut cur = start;
            let mut h = step;
            for _ in 0..cfg.refine {
                let b = cur.b;
                let (a, v) = golden_max(|a| f(a, b), (cur.a - h).max(0.0), (cur.a + h).min(1.0), width);
                if improves(v, cur.value) {
                    cur = PairOpt { value: v, a, b };
                }
                let a = cur.a;
                let (b, v) = golden_max(|b| f(a, b), (cur.b - h).max(0.0), (cur.b + h).min(1.0), width);
                if improves(v, cur.value) {
                    cur = PairOpt { value: v, a, b };
                }
                h *= 0.5;
            }
            if improves(cur.value, best.value) {
                best = cur;
            }
        }
        best
    }

    fn maximize_line(&self, f: &mut dyn FnMut(f64) -> f64, cfg: &SearchConfig) -> (f64, f64) {
        let n = cfg.grid.max(2) * 4 + 1;
        let (t, v) = grid_line(f, n);
        let h = 1.0 / (n - 1) as f64;
        let (tg, vg) = golden_max(&mut *f, (t - h).max(0.0), (t + h).min(1.0), golden_width(cfg));
        if improves(vg, v) {
            (tg, vg)
        } else {
            (t, v)
        }
    }

    fn continuous(&self) -> bool {
        true
    }
}

/// Brute-force fine grid with no refinement; an oracle for the other strategies.
#[derive(Debug, Default)]
pub struct Dense;

impl Dense {
    fn points(cfg: &SearchConfig) -> usize {
        8 * (cfg.grid.max(2) - 1) + 1
    }
}

impl Strategy for Dense {
    fn name(&self) -> &'static str {
        "dense"
    }

    fn optimize(&self, f: &mut dyn FnMut(f64, f64) -> f64, cfg: &SearchConfig) -> PairOpt {
        let n = Self::points(cfg);
        let mut best = PairOpt { value: f64::NEG_INFINITY, a: 0.0, b: 0.0 };
        for i in 0..n {
            for j in 0..n {
                let (a, b) = (i as f64 / (n - 1) as f64, j as f64 / (n - 1) as f64);
                let v = f(a, b);
                if v > best.value {
                    best = PairOpt { value: v, a, b };
                }
            }
        }
        best
    }

    fn maximize_line(&self, f: &mut dyn FnMut(f64) -> f64, cfg: &SearchConfig) -> (f64, f64) {
        grid_line(f, Self::points(cfg))
    }

    fn continuous(&self) -> bool {
        true
    }
}

type StrategyCtor = fn() -> Box<dyn Strategy>;

const STRATEGIES: &[(&str, StrategyCtor)] = &[
    ("grid-refine", || Box::new(GridRefine)),
    ("breakpoints", || Box::new(Breakpoints)),
    ("dense", || Box::new(Dense)),
];

pub const DEFAULT_STRATEGY: &str = "grid-refine";

pub fn strategy_names() -> Vec<&'static str> {
    STRATEGIES.iter().map(|(n, _)| *n).collect()
}

pub fn strategy(name: &str) -> Result<Box<dyn Strategy>> {
    match STRATEGIES.iter().find(|(n, _)| *n == name) {
        Some((_, ctor)) => Ok(ctor()),
        None => Err(Error::input(format!(
            "strategy: unknown name {name:?}, expected one of {:?}",
            strategy_names()
        ))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_refine_finds_interior_peak() {
        let cfg = SearchConfig::default();
        let mut f = |a: f64, b: f64| -(a - 0.3137).powi(2) - (b - 0.771).powi(2);
        let r = GridRefine.optimize(&mut f, &cfg);
        assert!((r.a - 0.3137).abs() < 1e-6 && (r.b - 0.771).abs() < 1e-6);
        let r = Breakpoints.optimize(&mut f, &cfg);
        assert_eq!((r.a, r.b), (1.0, 1.0));
        let r = Dense.optimize(&mut f, &cfg);
        assert!((r.a - 0.3137).abs() < 1.0 / 32.0);
    }

    #[test]
    fn registry() {
        assert_eq!(strategy("dense").unwrap().name(), "dense");
        assert!(strategy("simplex").is_err());
        assert_eq!(strategy_names().len(), 3);
    }
}
