//! BFGS with a strong-Wolfe line search (bracketing plus cubic zoom).

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

#[derive(Clone, Debug)]
pub(crate) struct BfgsOptions {
    pub max_iterations: usize,
    pub gradient_tolerance: f64,
    pub relative_tolerance: f64,
    pub c1: f64,
    pub c2: f64,
    pub max_line_search: usize,
}

impl Default for BfgsOptions {
    fn default() -> Self {
        BfgsOptions {
            max_iterations: 500,
            gradient_tolerance: 1e-6,
            relative_tolerance: 1e-9,
            c1: 1e-4,
            c2: 0.9,
            max_line_search: 40,
        }
    }
}

/// Why the optimizer stopped.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Termination {
    GradientTolerance,
    RelativeChange,
    MaxIterations,
    LineSearchFailed,
    NonFiniteStart,
}

impl Termination {
    pub fn converged(self) -> bool {
        matches!(self, Termination::GradientTolerance | Termination::RelativeChange)
    }

    pub fn name(self) -> &'static str {
        match self {
            Termination::GradientTolerance => "gradient-tolerance",
            Termination::RelativeChange => "relative-change",
            Termination::MaxIterations => "max-iterations",
            Termination::LineSearchFailed => "line-search-failed",
            Termination::NonFiniteStart => "non-finite-start",
        }
    }
}

#[derive(Clone, Debug)]
pub(crate) struct BfgsReport {
    pub x: Vec<f64>,
    pub f: f64,
    pub g: Vec<f64>,
    pub iterations: usize,
    pub termination: Termination,
    /// Objective at every accepted iterate, starting point included.
    pub trace: Vec<f64>,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn inf_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

struct Point {
    alpha: f64,
    f: f64,
    g: Vec<f64>,
    slope: f64,
}

/// Minimises `objective`, which returns the value and gradient at a point.
pub(crate) fn minimize(
    mut objective: impl FnMut(&[f64]) -> (f64, Vec<f64>),
    x0: Vec<f64>,
    opts: &BfgsOptions,
) -> BfgsReport {
    let n = x0.len();
    let mut x = x0;
    let (mut f, mut g) = objective(&x);
    let mut trace = vec![f];
    if !f.is_finite() || g.iter().any(|v| !v.is_finite()) {
        return BfgsReport {
            x,
            f,
            g,
            iterations: 0,
            termination: Termination::NonFiniteStart,
            trace,
        };
    }
    let mut h = DMatrix::<f64>::identity(n, n);
    let mut first = true;
    let mut iterations = 0;

    let termination = loop {
        if inf_norm(&g) < opts.gradient_tolerance {
            break Termination::GradientTolerance;
        }
        if iterations >= opts.max_iterations {
            break Termination::MaxIterations;
        }
        iterations += 1;

        let gv = DVector::from_column_slice(&g);
        let mut p: Vec<f64> = (-(&h * &gv)).iter().copied().collect();
        if dot(&p, &g) >= 0.0 {
            h.fill_with_identity();
            first = true;
            p = g.iter().map(|v| -v).collect();
        }
        let alpha0 = if first { (1.0 / inf_norm(&g)).min(1.0) } else { 1.0 };

        let Some(step) = line_search(&mut objective, &x, f, &g, &p, alpha0, opts) else {
            break Termination::LineSearchFailed;
        };

        let s: Vec<f64> = p.iter().map(|v| step.alpha * v).collect();
        let y: Vec<f64> = step.g.iter().zip(&g).map(|(a, b)| a - b).collect();
        for (xi, si) in x.iter_mut().zip(&s) {
            *xi += si;
        }
        let f_old = f;
        f = step.f;
        g = step.g;
        trace.push(f);

        let ys = dot(&y, &s);
        if ys > 1e-12 * dot(&y, &y).sqrt() * dot(&s, &s).sqrt() {
            if first {
                h.fill_with_identity();
                h *= ys / dot(&y, &y);
                first = false;
            }
            let rho = 1.0 / ys;
            let sv = DVector::from_column_slice(&s);
            let yv = DVector::from_column_slice(&y);
            let hy = &h * &yv;
            let yhy = yv.dot(&hy);
            // H+ = H - rho (s hy' + hy s') + (rho^2 y'Hy + rho) s s'
            h -= (&sv * hy.transpose() + &hy * sv.transpose()) * rho;
            h += (&sv * sv.transpose()) * (rho * rho * yhy + rho);
        }

        if inf_norm(&g) < opts.gradient_tolerance {
            break Termination::GradientTolerance;
        }
        if (f_old - f).abs() <= opts.relative_tolerance * f_old.abs().max(1.0) {
            break Termination::RelativeChange;
        }
    };
    BfgsReport {
        x,
        f,
        g,
        iterations,
        termination,
        trace,
    }
}

fn line_search(
    objective: &mut impl FnMut(&[f64]) -> (f64, Vec<f64>),
    x: &[f64],
    f0: f64,
    g0: &[f64],
    p: &[f64],
    alpha_init: f64,
    opts: &BfgsOptions,
) -> Option<Point> {
    let slope0 = dot(g0, p);
    let mut trial = vec![0.0; x.len()];
    let mut evals = 0;
    let mut eval = |alpha: f64, evals: &mut usize| -> Point {
        *evals += 1;
        for ((t, xi), pi) in trial.iter_mut().zip(x).zip(p) {
            *t = xi + alpha * pi;
        }
        let (f, g) = objective(&trial);
        let slope = dot(&g, p);
        let (f, slope) = if f.is_finite() && slope.is_finite() {
            (f, slope)
        } else {
            (f64::INFINITY, f64::NAN)
        };
        Point { alpha, f, g, slope }
    };
    let armijo = |pt: &Point| pt.f <= f0 + opts.c1 * pt.alpha * slope0;
    let curvature = |pt: &Point| pt.slope.abs() <= -opts.c2 * slope0;

    let mut prev = Point {
        alpha: 0.0,
        f: f0,
        g: g0.to_vec(),
        slope: slope0,
    };
    let mut alpha = alpha_init;
    let mut best: Option<Point> = None;
    let keep_best = |best: &mut Option<Point>, pt: &Point| {
        if armijo(pt) && best.as_ref().is_none_or(|b| pt.f < b.f) {
            *best = Some(Point {
                alpha: pt.alpha,
                f: pt.f,
                g: pt.g.clone(),
                slope: pt.slope,
            });
        }
    };

    let (mut lo, mut hi) = loop {
        let cur = eval(alpha, &mut evals);
        keep_best(&mut best, &cur);
        if !armijo(&cur) || (prev.alpha > 0.0 && cur.f >= prev.f) {
            break (prev, cur);
        }
        if curvature(&cur) {
            return Some(cur);
        }
        if cur.slope >= 0.0 {
            break (cur, prev);
        }
        if evals >= opts.max_line_search {
            return best;
        }
        alpha = 2.0 * cur.alpha;
        prev = cur;
    };

    // zoom: lo satisfies Armijo and has the lower value of the bracket
    while evals < opts.max_line_search {
        let a = interpolate(&lo, &hi);
        let cur = eval(a, &mut evals);
        keep_best(&mut best, &cur);
        if !armijo(&cur) || cur.f >= lo.f {
            hi = cur;
        } else {
            if curvature(&cur) {
                return Some(cur);
            }
            if cur.slope * (hi.alpha - lo.alpha) >= 0.0 {
                hi = std::mem::replace(&mut lo, cur);
            } else {
                lo = cur;
            }
        }
        if (hi.alpha - lo.alpha).abs() < 1e-16 * lo.alpha.abs().max(1.0) {
            break;
        }
    }
    best
}

/// Cubic interpolation of the bracket, safeguarded towards bisection.
fn interpolate(lo: &Point, hi: &Point) -> f64 {
    let (a, b) = (lo.alpha, hi.alpha);
    let (left, right) = (a.min(b), a.max(b));
    let width = right - left;
    let bisect = 0.5 * (a + b);
    if !hi.f.is_finite() || !hi.slope.is_finite() {
        return bisect;
    }
    let d1 = lo.slope + hi.slope - 3.0 * (lo.f - hi.f) / (a - b);
    let disc = d1 * d1 - lo.slope * hi.slope;
    if disc < 0.0 {
        return bisect;
    }
    let d2 = (b - a).signum() * disc.sqrt();
    let c = b - (b - a) * (hi.slope + d2 - d1) / (hi.slope - lo.slope + 2.0 * d2);
    if c.is_finite() && c > left + 0.1 * width && c < right - 0.1 * width {
        c
    } else {
        bisect
    }
}
