//! Closed-form sharp constants and envelopes for the John–Nirenberg and
//! BMO_p / BMO_2 comparison inequalities.

use serde::{Deserialize, Serialize};
use statrs::function::gamma::gamma;

use crate::error::{Error, Result};

/// Relative tolerance requested from the adaptive quadrature.
pub const QUAD_TOL: f64 = 1e-13;

/// `(p/e * (Gamma(p) - int_0^1 t^{p-1} e^t dt) + 1)^{1/p}`, the sharp exponent
/// in the integral John–Nirenberg inequality for the BMO_p norm.
pub fn c3p(p: f64) -> Result<f64> {
    if !(p >= 1.0 && p.is_finite()) {
        return Err(Error::input(format!("p: c3p needs p >= 1, got {p}")));
    }
    let inner = p / std::f64::consts::E * (gamma(p) - power_exp_integral(p)) + 1.0;
    Ok(inner.powf(1.0 / p))
}

/// `int_0^1 t^{p-1} e^t dt` for `p >= 1`.
///
/// Substituting `t = u^2` turns the integrand into `2 u^{2p-1} e^{u^2}`, which is
/// smooth on `[0,1]` for every `p >= 1`; adaptive Simpson then converges fast.
pub fn power_exp_integral(p: f64) -> f64 {
    let f = move |u: f64| if u == 0.0 { 0.0 } else { 2.0 * u.powf(2.0 * p - 1.0) * (u * u).exp() };
    adaptive_simpson(&f, 0.0, 1.0, QUAD_TOL)
}

/// Adaptive Simpson quadrature with Richardson correction.
pub fn adaptive_simpson(f: &dyn Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
    fn rec(
        f: &dyn Fn(f64) -> f64,
        a: f64,
        b: f64,
        fa: f64,
        fm: f64,
        fb: f64,
        whole: f64,
        tol: f64,
        depth: u32,
    ) -> f64 {
        let m = 0.5 * (a + b);
        let (lm, rm) = (0.5 * (a + m), 0.5 * (m + b));
        let (flm, frm) = (f(lm), f(rm));
        let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
        let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
        let delta = left + right - whole;
        if depth == 0 || delta.abs() <= 15.0 * tol {
            return left + right + delta / 15.0;
        }
        rec(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1)
            + rec(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1)
    }
    let (fa, fb) = (f(a), f(b));
    let m = 0.5 * (a + b);
    let fm = f(m);
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    rec(f, a, b, fa, fm, fb, whole, tol, 50)
}

/// `(p/2 * Gamma(p))^{1/p}`, the sharp constant in `||f||_p <= C ||f||_2`, `p > 2`.
pub fn lp_equiv_constant(p: f64) -> Result<f64> {
    if !(p > 2.0 && p.is_finite()) {
        return Err(Error::input(format!("p: lp_equiv_constant needs p > 2, got {p}")));
    }
    Ok((0.5 * p * gamma(p)).powf(1.0 / p))
}

/// Sharp weak-type envelope for BMO_2 with `lambda` measured in units of the norm.
pub fn jn_weak_envelope(lambda: f64) -> Result<f64> {
    if !(lambda > 0.0) {
        return Err(Error::input(format!("lambda: must be positive, got {lambda}")));
    }
    Ok(if lambda <= 1.0 {
        1.0
    } else if lambda <= 2.0 {
        1.0 / (lambda * lambda)
    } else {
        weak_tail(lambda)
    })
}

fn weak_tail(lambda: f64) -> f64 {
    let e = std::f64::consts::E;
    e * e / 4.0 * (-lambda).exp()
}

/// Classical sharp John–Nirenberg constants on an interval: `(C1, C2)` with
/// `C2 = 2/e` and `C1 = e^{4/e} / 2`.
pub fn classic_jn_constants() -> (f64, f64) {
    let e = std::f64::consts::E;
    (0.5 * (4.0 / e).exp(), 2.0 / e)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "problem", rename_all = "snake_case")]
pub enum BellmanProblem {
    /// Supremum of `<|phi|^p>` at the point `(0, 1)` of the parabolic strip.
    LpMoment { p: f64 },
    /// Supremum of `|{|phi| >= lambda}|` at the same point.
    WeakType { lambda: f64 },
}

/// Bellman function value at `(0, 1)` for the preset problems.
pub fn bellman_value(problem: BellmanProblem) -> Result<f64> {
    match problem {
        BellmanProblem::LpMoment { p } => {
            if !(p >= 2.0 && p.is_finite()) {
                return Err(Error::input(format!("p: lp_moment Bellman value needs p >= 2, got {p}")));
            }
            Ok(0.5 * p * gamma(p))
        }
        BellmanProblem::WeakType { lambda } => {
            if !(lambda >= 1.0 && lambda.is_finite()) {
                return Err(Error::input(format!(
                    "lambda: weak_type Bellman value needs lambda >= 1, got {lambda}"
                )));
            }
            Ok(if lambda <= 2.0 { 1.0 / (lambda * lambda) } else { weak_tail(lambda) })
        }
    }
}

/// One request for the `constants` front end.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "which", rename_all = "snake_case")]
pub enum ConstantQuery {
    C3p { p: f64 },
    LpEquiv { p: f64 },
    JnWeakEnvelope { lambda: f64 },
    ClassicJn,
    BellmanValue(BellmanProblem),
}

impl ConstantQuery {
    /// Named values for the query, in a fixed order.
    pub fn evaluate(&self) -> Result<Vec<(&'static str, f64)>> {
        Ok(match *self {
            ConstantQuery::C3p { p } => vec![("c3p", c3p(p)?)],
            ConstantQuery::LpEquiv { p } => vec![("lp_equiv", lp_equiv_constant(p)?)],
            ConstantQuery::JnWeakEnvelope { lambda } => {
                vec![("jn_weak_envelope", jn_weak_envelope(lambda)?)]
            }
            ConstantQuery::ClassicJn => {
                let (c1, c2) = classic_jn_constants();
                vec![("c1", c1), ("c2", c2)]
            }
            ConstantQuery::BellmanValue(b) => vec![("bellman_value", bellman_value(b)?)],
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const E: f64 = std::f64::consts::E;

    #[test]
    fn c3p_closed_forms() {
        assert!((c3p(1.0).unwrap() - 2.0 / E).abs() < 1e-12);
        assert!((c3p(1.0).unwrap() - 0.7357588823).abs() < 1e-10);
        assert!((c3p(2.0).unwrap() - 1.0).abs() < 1e-10);
        assert!((c3p(1.0).unwrap() - classic_jn_constants().1).abs() < 1e-12);
        assert!(c3p(0.5).is_err());
    }

    #[test]
    fn lp_equiv_values() {
        assert!((lp_equiv_constant(4.0).unwrap() - 12f64.powf(0.25)).abs() < 1e-12);
        assert!((lp_equiv_constant(3.0).unwrap() - 3f64.powf(1.0 / 3.0)).abs() < 1e-12);
        assert!((lp_equiv_constant(2.0 + 1e-9).unwrap() - 1.0).abs() < 1e-8);
        assert!(lp_equiv_constant(2.0).is_err());
    }

    #[test]
    fn envelope_branches() {
        assert_eq!(jn_weak_envelope(0.5).unwrap(), 1.0);
        assert_eq!(jn_weak_envelope(1.0).unwrap(), 1.0);
        assert!((jn_weak_envelope(1.0 + 1e-15).unwrap() - 1.0).abs() < 1e-12);
        assert!((jn_weak_envelope(2.0).unwrap() - 0.25).abs() < 1e-15);
        assert!((weak_tail(2.0) - 0.25).abs() < 1e-15);
        assert!((jn_weak_envelope(3.0).unwrap() - 0.0919699).abs() < 1e-7);
        assert!(jn_weak_envelope(0.0).is_err());
    }

    #[test]
    fn classic_and_bellman() {
        let (c1, c2) = classic_jn_constants();
        assert!((c1 - 2.177920634287658).abs() < 1e-12);
        assert!((c2 - 2.0 / E).abs() < 1e-15);
        assert!((bellman_value(BellmanProblem::LpMoment { p: 2.0 }).unwrap() - 1.0).abs() < 1e-14);
        assert!((bellman_value(BellmanProblem::WeakType { lambda: 2.0 }).unwrap() - 0.25).abs() < 1e-15);
        assert!(bellman_value(BellmanProblem::WeakType { lambda: 0.5 }).is_err());
        assert!(bellman_value(BellmanProblem::LpMoment { p: 1.5 }).is_err());
    }

    #[test]
    fn query_json() {
        let q: ConstantQuery = serde_json::from_str(r#"{"which":"c3p","p":1.0}"#).unwrap();
        assert_eq!(q.evaluate().unwrap()[0].0, "c3p");
    }
}
