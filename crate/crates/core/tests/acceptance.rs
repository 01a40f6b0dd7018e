//! Acceptance criteria 1 to 9. Runs without the libtest harness so that the
//! per-criterion lines always reach the console; exits non-zero if any fails.

use std::process::ExitCode;
use std::time::{Duration, Instant};

use rand::Rng;
use transfer_core::constants::{c3p, jn_weak_envelope, lp_equiv_constant};
use transfer_core::corpus;
use transfer_core::dag::ConstructExpr;
use transfer_core::martingale::{
    log_staircase, power_staircase, validate_membership, Edge, MartingaleTree, MembershipDomain, TreeNode,
};
use transfer_core::search::{ap_constant, bmo_norm, circle_bmo_norm, reverse_holder_ratio, weak_distribution, SearchConfig};
use transfer_core::verify::{jn_pipeline, verify_lp, verify_monotone, verify_weak, JnParams};
use transfer_core::{Distribution, IntervalQuery, StepFunction};

const E: f64 = std::f64::consts::E;

struct Outcome {
    pass: bool,
    detail: String,
}

/// Collects sub-checks of one criterion; the first failure is reported.
#[derive(Default)]
struct Checks {
    notes: Vec<String>,
    failures: Vec<String>,
}

impl Checks {
    fn near(&mut self, name: &str, observed: f64, expected: f64, tol: f64) {
        self.cond(name, (observed - expected).abs() <= tol, format!("{name}={observed:.12} vs {expected:.12} (tol {tol:e})"));
    }

    fn cond(&mut self, name: &str, ok: bool, note: String) {
        if ok {
            self.notes.push(note);
        } else {
            self.failures.push(format!("{name} failed: {note}"));
        }
    }

    fn finish(self, elapsed: Duration, limit: Duration) -> Outcome {
        let mut failures = self.failures;
        if elapsed > limit {
            failures.push(format!("runtime {elapsed:.2?} over {limit:.0?}"));
        }
        let pass = failures.is_empty();
        let detail = if pass { self.notes.join("; ") } else { failures.join("; ") };
        Outcome { pass, detail: format!("{detail} [{elapsed:.2?}]") }
    }
}

fn secs(s: u64) -> Duration {
    Duration::from_secs(s)
}

fn sign() -> StepFunction {
    StepFunction::on_interval(vec![-1.0, 0.0, 1.0], vec![-1.0, 1.0]).unwrap()
}

fn criterion_1() -> Outcome {
    let t = Instant::now();
    let mut c = Checks::default();
    let cfg = SearchConfig::default();
    for p in [1.0, 2.0, 3.0] {
        let r = bmo_norm(&sign(), p, &cfg).unwrap();
        c.near(&format!("norm_p{p}"), r.lower, 1.0, 1e-12);
    }
    let whole = IntervalQuery::new(-1.0, 1.0).unwrap();
    c.near("weak(1)", weak_distribution(&sign(), &whole, 1.0).unwrap(), 1.0, 1e-12);
    c.finish(t.elapsed(), secs(1))
}

/// Oracle for the 0 / 1 split at 3/4: an interval holding a fraction `th` of
/// ones has oscillation `2 th (1 - th)` (p = 1) or `sqrt(th (1 - th))` (p = 2).
fn split_oracle(p: f64, th: f64) -> f64 {
    if p == 1.0 {
        2.0 * th * (1.0 - th)
    } else {
        (th * (1.0 - th)).sqrt()
    }
}

fn criterion_2() -> Outcome {
    let t = Instant::now();
    let mut c = Checks::default();
    let split = StepFunction::on_interval(vec![0.0, 0.75, 1.0], vec![0.0, 1.0]).unwrap();
    let cfg = SearchConfig::default();
    for p in [1.0, 2.0] {
        // brute-force oracle over a fine interval grid
        let n = 400;
        let mut best: f64 = 0.0;
        for i in 0..n {
            for j in i + 1..=n {
                let (a, b) = (i as f64 / n as f64, j as f64 / n as f64);
                let ones = (b - a.max(0.75)).max(0.0);
                best = best.max(split_oracle(p, ones / (b - a)));
            }
        }
        let r = bmo_norm(&split, p, &cfg).unwrap();
        c.near(&format!("p{p}_lower"), r.lower, best, 1e-6);
        c.near(&format!("p{p}_witness_len"), r.witness[1] - r.witness[0], 0.5, 1e-6);
    }
    let bp = bmo_norm(&split, 1.0, &SearchConfig { strategy: "breakpoints".into(), ..cfg }).unwrap();
    c.near("breakpoints_p1", bp.lower, split_oracle(1.0, 0.25), 1e-12);
    c.finish(t.elapsed(), secs(1))
}

fn criterion_3() -> Outcome {
    let t = Instant::now();
    let mut c = Checks::default();
    c.near("c3p(1)", c3p(1.0).unwrap(), 2.0 / E, 1e-12);
    c.near("c3p(2)", c3p(2.0).unwrap(), 1.0, 1e-10);
    c.near("lp_equiv(4)", lp_equiv_constant(4.0).unwrap(), 12f64.powf(0.25), 1e-12);
    for l in [1.0, 2.0] {
        let h = 1e-13;
        let jump = (jn_weak_envelope(l - h).unwrap() - jn_weak_envelope(l + h).unwrap()).abs();
        c.cond(&format!("continuity@{l}"), jump < 1e-12, format!("jump@{l}={jump:.1e}"));
    }
    // both branch formulas agree at the case boundaries
    c.near("branches@1", 1.0 / (1.0f64 * 1.0), 1.0, 1e-12);
    c.near("branches@2", (E * E / 4.0) * (-2.0f64).exp(), 0.25, 1e-12);
    c.finish(t.elapsed(), secs(1))
}

/// Mean absolute deviation of `log x` over `[t, 1]`, closed form.
fn log_oscillation(t: f64) -> f64 {
    let big_f = |x: f64| if x == 0.0 { 0.0 } else { x * x.ln() - x };
    let m = (big_f(1.0) - big_f(t)) / (1.0 - t);
    let x0 = m.exp();
    2.0 * (m * (x0 - t) - (big_f(x0) - big_f(t))) / (1.0 - t)
}

fn criterion_4() -> Outcome {
    let t = Instant::now();
    let mut c = Checks::default();
    // scale invariance reduces intervals in [0, 1] to [t, 1]
    let oracle = (0..10_000).map(|k| log_oscillation(k as f64 / 10_000.0)).fold(0.0, f64::max);
    c.near("log_oracle", oracle, 2.0 / E, 1e-4);
    let (f, _) = log_staircase(1.02, 400).unwrap();
    let r = bmo_norm(&f, 1.0, &SearchConfig::default()).unwrap();
    c.near("staircase_norm", r.lower, 2.0 / E, 0.02);
    c.near("staircase_vs_oracle", r.lower, oracle, 0.02);
    c.finish(t.elapsed(), secs(120))
}

fn criterion_5() -> Outcome {
    let t = Instant::now();
    let mut c = Checks::default();
    let mut rng = corpus::rng(5);
    let mut worst: f64 = 0.0;
    for _ in 0..100 {
        let child = corpus::construction(&mut rng, 2).unwrap();
        let lambda = rng.gen_range(0.3..0.95);
        let levels = Some(rng.gen_range(1..=5));
        let node = if rng.gen_bool(0.5) {
            let h = ConstructExpr::hom(child.clone(), lambda, levels).unwrap();
            worst = worst.max(h.distribution().tv_distance(child.distribution()));
            h
        } else {
            let other = corpus::construction(&mut rng, 2).unwrap();
            let alpha = rng.gen_range(0.05..0.95);
            let g = ConstructExpr::glue(child.clone(), other.clone(), alpha, lambda, levels).unwrap();
            let mix = child.distribution().mix(other.distribution(), alpha).unwrap();
            worst = worst.max(g.distribution().tv_distance(&mix));
            g
        };
        // independent route: flatten and re-derive the distribution piecewise
        if let Ok(flat) = node.materialize(200_000) {
            worst = worst.max(flat.full_distribution().tv_distance(node.distribution()));
        }
    }
    c.cond("tv", worst <= 1e-12, format!("max TV {worst:.1e}"));
    let mut prev = f64::INFINITY;
    let mut values = Vec::new();
    for lh in [0.5, 0.9, 0.99] {
        let e = ConstructExpr::periodize(ConstructExpr::hom(ConstructExpr::leaf(sign()), lh, None).unwrap());
        let r = circle_bmo_norm(&e, 2.0, &SearchConfig::default()).unwrap();
        c.cond(&format!("nonincreasing@{lh}"), r.lower <= prev, format!("circle bmo2({lh})={:.12}", r.lower));
        prev = r.lower;
        values.push(r.lower);
    }
    c.cond("bound@0.99", values[2] <= 1.1, format!("{} <= 1.1", values[2]));
    c.finish(t.elapsed(), secs(300))
}

fn criterion_6() -> Outcome {
    let t = Instant::now();
    let mut c = Checks::default();
    let root = TreeNode {
        value: Distribution::from_masses([(-1.0, 0.5), (1.0, 0.5)]).unwrap(),
        children: vec![
            Edge { prob: 0.5, node: TreeNode::leaf(Distribution::delta(-1.0)) },
            Edge { prob: 0.5, node: TreeNode::leaf(Distribution::delta(1.0)) },
        ],
    };
    let m = MartingaleTree::Measure { root };
    let cfg = SearchConfig::default();
    for eps in [0.5, 0.99, 1.0, 1.0 + 1e-6, 1.05, 1.5] {
        let r = validate_membership(&m, &MembershipDomain::BmoP { p: 2.0, eps }, &cfg).unwrap();
        c.cond(&format!("pass_iff@{eps}"), r.pass == (eps > 1.0), format!("eps={eps} pass={}", r.pass));
        // the hull maximum is 4 a (1 - a) = 1 at a = 1/2
        c.near(&format!("slack@{eps}"), r.slack, eps * eps - 1.0, 1e-9);
    }
    c.finish(t.elapsed(), secs(1))
}

fn criterion_7() -> Outcome {
    let t = Instant::now();
    let mut c = Checks::default();
    let cfg = SearchConfig::default();
    let w = StepFunction::on_interval(vec![0.0, 0.5, 1.0], vec![1.0, 4.0]).unwrap();
    // two values a, b: the A_2 form peaks at equal weights, (a + b)^2 / (4ab)
    let (a, b) = (1.0, 4.0);
    c.near("two_step_A2", ap_constant(&w, 2.0, &cfg).unwrap().lower, (a + b) * (a + b) / (4.0 * a * b), 1e-9);
    let (stair, _) = power_staircase(0.5, 2.0, 1.05, 200).unwrap();
    // <x^{1/2}> <x^{-1/2}> over [0, s] is (2/3)(2) for every s
    let a2 = ap_constant(&stair, 2.0, &cfg).unwrap().lower;
    let target = (2.0 / 3.0) * 2.0;
    c.near("staircase_A2", a2, target, 0.02 * target);
    let (fine, _) = power_staircase(0.5, 2.0, 1.02, 400).unwrap();
    let rh = reverse_holder_ratio(&fine, &IntervalQuery::new(0.0, 1.0).unwrap(), 2.0).unwrap();
    // <x>^{1/2} / <x^{1/2}> = sqrt(1/2) / (2/3)
    c.near("rh_q2", rh, 0.5f64.sqrt() * 1.5, 1e-3);
    c.finish(t.elapsed(), secs(120))
}

fn criterion_8() -> Outcome {
    let t = Instant::now();
    let mut c = Checks::default();
    let params = JnParams { delta: 0.3, m: 2.0, ..JnParams::default() };
    let (report, out) = jn_pipeline(&params, &SearchConfig::default()).unwrap();
    for chk in &report.checks {
        c.cond(&chk.name, chk.pass, format!("{}: {:.6} vs {:.6}", chk.name, chk.observed, chk.expected));
    }
    c.cond("depth", out.depth <= 60, format!("N={}", out.depth));
    let bound = 2.0 / E + 0.3 + 0.05;
    c.cond("upper", out.circle_upper <= bound, format!("upper {:.6} <= {bound:.6}", out.circle_upper));
    c.finish(t.elapsed(), secs(1800))
}

fn criterion_9() -> Outcome {
    let t = Instant::now();
    let mut c = Checks::default();
    let cfg = SearchConfig { seed: 9, ..SearchConfig::default() };
    for report in [verify_weak(100, &cfg).unwrap(), verify_lp(100, &cfg).unwrap(), verify_monotone(100, &cfg).unwrap()] {
        let failed: Vec<_> = report.failures().map(|f| f.name.clone()).collect();
        c.cond(&report.suite, report.pass, format!("{} {} checks, failed {:?}", report.suite, report.checks.len(), failed));
    }
    c.finish(t.elapsed(), secs(600))
}

fn main() -> ExitCode {
    let criteria: [(&str, fn() -> Outcome); 9] = [
        ("exactness", criterion_1),
        ("interior optimum", criterion_2),
        ("constant formulas", criterion_3),
        ("staircase convergence", criterion_4),
        ("gluing and homogenization identities", criterion_5),
        ("membership validation", criterion_6),
        ("A_p suite", criterion_7),
        ("transference mechanism", criterion_8),
        ("inequality suites", criterion_9),
    ];
    let filter: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let mut all = true;
    for (k, (name, run)) in criteria.iter().enumerate() {
        let id = format!("{}", k + 1);
        if !filter.is_empty() && !filter.iter().any(|f| *f == id) {
            continue;
        }
        let o = run();
        all &= o.pass;
        println!("criterion {id} ({name}): {} - {}", if o.pass { "PASS" } else { "FAIL" }, o.detail);
    }
    if all {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
