//! Seeded random instances for property checks and verification suites.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::dag::ConstructExpr;
use crate::error::Result;
use crate::measure::{IntervalQuery, MonotoneMap, StepFunction};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn breakpoints(rng: &mut impl Rng, pieces: usize) -> Vec<f64> {
    loop {
        let mut b: Vec<f64> = (0..pieces - 1).map(|_| rng.gen_range(0.0..1.0)).collect();
        b.push(0.0);
        b.push(1.0);
        b.sort_by(f64::total_cmp);
        if b.windows(2).all(|w| w[1] - w[0] > 1e-3) {
            return b;
        }
    }
}

/// Step function on `[0, 1]` with 2 to 8 pieces and values in `[-2, 2]`,
/// never constant.
pub fn step_function(rng: &mut impl Rng) -> StepFunction {
    let n = rng.gen_range(2..=8);
    let b = breakpoints(rng, n);
    let mut v: Vec<f64> = (0..n).map(|_| rng.gen_range(-2.0..2.0)).collect();
    if v.windows(2).all(|w| w[0] == w[1]) {
        v[0] += 1.0;
    }
    StepFunction::on_interval(b, v).expect("valid by construction")
}

/// Positive weight on `[0, 1]` with 2 to 8 pieces and values in `[e^-2, e^2]`.
pub fn weight(rng: &mut impl Rng) -> StepFunction {
    let n = rng.gen_range(2..=8);
    let b = breakpoints(rng, n);
    let v = (0..n).map(|_| rng.gen_range(-2.0f64..2.0).exp()).collect();
    StepFunction::on_interval(b, v).expect("valid by construction")
}

/// Nondecreasing piecewise-linear map with slopes in `[0, 1]`.
pub fn lipschitz_map(rng: &mut impl Rng) -> MonotoneMap {
    let n = rng.gen_range(2..=6);
    let mut x = -3.0;
    let mut y = rng.gen_range(-1.0..1.0);
    let mut knots = vec![(x, y)];
    for _ in 0..n {
        let dx = rng.gen_range(0.2..1.5);
        x += dx;
        y += dx * rng.gen_range(0.0..=1.0);
        knots.push((x, y));
    }
    MonotoneMap::new(knots).expect("valid by construction")
}

/// Subinterval of `[a, b]` of length at least a hundredth of it.
pub fn subinterval(rng: &mut impl Rng, a: f64, b: f64) -> IntervalQuery {
    let len = (b - a) * rng.gen_range(0.01..=1.0);
    let left = a + rng.gen_range(0.0..=1.0) * (b - a - len);
    IntervalQuery { left, right: (left + len).min(b) }
}

/// Small random construction: leaves from [`step_function`] combined by
/// homogenization and gluing, depth at most `depth`.
pub fn construction(rng: &mut impl Rng, depth: usize) -> Result<ConstructExpr> {
    if depth == 0 || rng.gen_bool(0.2) {
        return Ok(ConstructExpr::leaf(step_function(rng)));
    }
    let lambda = rng.gen_range(0.3..0.95);
    let levels = Some(rng.gen_range(1..=6));
    if rng.gen_bool(0.4) {
        ConstructExpr::hom(construction(rng, depth - 1)?, lambda, levels)
    } else {
        let alpha = rng.gen_range(0.05..0.95);
        let l = construction(rng, depth - 1)?;
        let r = construction(rng, depth - 1)?;
        ConstructExpr::glue(l, r, alpha, lambda, levels)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn seeded_and_valid() {
        let a: Vec<StepFunction> = (0..5).map(|_| step_function(&mut rng(3))).collect();
        assert!(a.windows(2).all(|w| w[0] == w[1]));
        let mut r = rng(9);
        for _ in 0..200 {
            let f = step_function(&mut r);
            assert!((2..=8).contains(&f.piece_count()));
            let w = weight(&mut r);
            assert!(w.values().iter().all(|&v| v > 0.0));
            assert!(lipschitz_map(&mut r).lipschitz() <= 1.0 + 1e-12);
            let q = subinterval(&mut r, 0.0, 1.0);
            assert!(q.left >= 0.0 && q.right <= 1.0 && q.left < q.right);
        }
        let e = construction(&mut rng(1), 3).unwrap();
        assert!(e.depth() <= 3);
    }
}
