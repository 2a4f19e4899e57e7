//! BFGS with a strong-Wolfe line search.
//!
//! Dense inverse-Hessian update; the line search is the bracketing/zoom scheme
//! with safeguarded cubic interpolation.

use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BfgsSettings {
    /// Stop when the gradient infinity-norm drops to this value.
    pub gtol: f64,
    pub max_iter: usize,
    /// Sufficient-decrease constant.
    pub c1: f64,
    /// Curvature constant.
    pub c2: f64,
    pub max_line_search: usize,
}

impl Default for BfgsSettings {
    fn default() -> Self {
        BfgsSettings { gtol: 1e-6, max_iter: 10_000, c1: 1e-4, c2: 0.9, max_line_search: 40 }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Termination {
    Converged,
    MaxIterations,
    LineSearchFailure,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TraceEntry {
    pub value: f64,
    pub grad_norm: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct BfgsOutcome {
    pub x: Vec<f64>,
    pub value: f64,
    pub grad: Vec<f64>,
    pub iterations: usize,
    pub evaluations: usize,
    /// Accepted iterates, starting with the initial point.
    pub trace: Vec<TraceEntry>,
    pub termination: Termination,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn inf_norm(a: &[f64]) -> f64 {
    a.iter().fold(0.0, |m, v| m.max(v.abs()))
}

struct Probe {
    alpha: f64,
    value: f64,
    slope: f64,
    grad: Vec<f64>,
}

/// Minimizer of the cubic through (a, fa, da), (b, fb, db), if it exists.
fn cubic_min(a: f64, fa: f64, da: f64, b: f64, fb: f64, db: f64) -> Option<f64> {
    let d1 = da + db - 3.0 * (fa - fb) / (a - b);
    let disc = d1 * d1 - da * db;
    if disc < 0.0 {
        return None;
    }
    let d2 = (b - a).signum() * disc.sqrt();
    let t = b - (b - a) * (db + d2 - d1) / (db - da + 2.0 * d2);
    t.is_finite().then_some(t)
}

/// Minimize `f`, which returns value and gradient.
pub fn minimize<F>(mut f: F, x0: Vec<f64>, settings: &BfgsSettings) -> BfgsOutcome
where
    F: FnMut(&[f64]) -> (f64, Vec<f64>),
{
    let n = x0.len();
    let mut x = x0;
    let (mut fx, mut g) = f(&x);
    let mut evaluations = 1;
    let mut trace = vec![TraceEntry { value: fx, grad_norm: inf_norm(&g) }];
    let mut h = identity(n);
    let mut fresh = true;
    let mut iterations = 0;

    let termination = loop {
        if inf_norm(&g) <= settings.gtol {
            break Termination::Converged;
        }
        if iterations >= settings.max_iter {
            break Termination::MaxIterations;
        }
        let mut d = mat_vec(&h, &g, n);
        d.iter_mut().for_each(|v| *v = -*v);
        let mut slope0 = dot(&g, &d);
        if !(slope0 < 0.0) {
            h = identity(n);
            fresh = true;
            d = g.iter().map(|v| -v).collect();
            slope0 = dot(&g, &d);
        }
        let alpha0 = if fresh && iterations == 0 { (1.0 / inf_norm(&g)).min(1.0) } else { 1.0 };
        let search = line_search(&mut f, &x, fx, slope0, &d, alpha0, settings, &mut evaluations);
        let Some(step) = search else {
            if fresh {
                break Termination::LineSearchFailure;
            }
            // retry once along steepest descent
            h = identity(n);
            fresh = true;
            continue;
        };
        iterations += 1;
        let s: Vec<f64> = d.iter().map(|v| step.alpha * v).collect();
        let y: Vec<f64> = step.grad.iter().zip(&g).map(|(a, b)| a - b).collect();
        x.iter_mut().zip(&s).for_each(|(xi, si)| *xi += si);
        fx = step.value;
        g = step.grad;
        trace.push(TraceEntry { value: fx, grad_norm: inf_norm(&g) });

        let ys = dot(&y, &s);
        if ys > 1e-12 * dot(&y, &y).sqrt() * dot(&s, &s).sqrt() {
            if fresh {
                let scale = ys / dot(&y, &y);
                h.iter_mut().for_each(|v| *v *= scale);
            }
            bfgs_update(&mut h, &s, &y, ys, n);
            fresh = false;
        }
    };
    BfgsOutcome { x, value: fx, grad: g, iterations, evaluations, trace, termination }
}

fn identity(n: usize) -> Vec<f64> {
    let mut h = vec![0.0; n * n];
    for i in 0..n {
        h[i * n + i] = 1.0;
    }
    h
}

fn mat_vec(h: &[f64], v: &[f64], n: usize) -> Vec<f64> {
    (0..n).map(|i| dot(&h[i * n..(i + 1) * n], v)).collect()
}

/// `H ← (I − ρ s yᵀ) H (I − ρ y sᵀ) + ρ s sᵀ`.
fn bfgs_update(h: &mut [f64], s: &[f64], y: &[f64], ys: f64, n: usize) {
    let rho = 1.0 / ys;
    let hy = mat_vec(h, y, n);
    let yhy = dot(y, &hy);
    let coef = rho * rho * yhy + rho;
    for i in 0..n {
        for j in 0..n {
            h[i * n + j] += coef * s[i] * s[j] - rho * (hy[i] * s[j] + s[i] * hy[j]);
        }
    }
}

#[allow(clippy::too_many_arguments)]
fn line_search<F>(
    f: &mut F,
    x: &[f64],
    f0: f64,
    slope0: f64,
    d: &[f64],
    alpha_init: f64,
    settings: &BfgsSettings,
    evaluations: &mut usize,
) -> Option<Probe>
where
    F: FnMut(&[f64]) -> (f64, Vec<f64>),
{
    let mut eval = |alpha: f64| {
        let xt: Vec<f64> = x.iter().zip(d).map(|(xi, di)| xi + alpha * di).collect();
        let (value, grad) = f(&xt);
        *evaluations += 1;
        let slope = dot(&grad, d);
        Probe { alpha, value, slope, grad }
    };
    let armijo = |p: &Probe| p.value <= f0 + settings.c1 * p.alpha * slope0;
    let curvature = |p: &Probe| p.slope.abs() <= -settings.c2 * slope0;

    let mut prev = Probe { alpha: 0.0, value: f0, slope: slope0, grad: Vec::new() };
    let mut alpha = alpha_init;
    let mut best: Option<Probe> = None;
    let mut budget = settings.max_line_search;
    let (mut lo, mut hi);
    let mut first = true;
    loop {
        if budget == 0 {
            return best;
        }
        budget -= 1;
        let cur = eval(alpha);
        if !cur.value.is_finite() {
            // shrink towards the last good point
            alpha = 0.5 * (prev.alpha + alpha);
            continue;
        }
        if !armijo(&cur) || (!first && cur.value >= prev.value) {
            lo = prev;
            hi = cur;
            break;
        }
        if curvature(&cur) {
            return Some(cur);
        }
        if cur.slope >= 0.0 {
            lo = cur;
            hi = prev;
            break;
        }
        let next = cubic_min(prev.alpha, prev.value, prev.slope, cur.alpha, cur.value, cur.slope)
            .filter(|t| *t > cur.alpha * 1.1 && *t < cur.alpha * 10.0)
            .unwrap_or(cur.alpha * 2.0);
        best = Some(Probe { grad: cur.grad.clone(), ..cur });
        prev = cur;
        alpha = next;
        first = false;
    }

    // zoom: lo satisfies Armijo and has the lower value, hi brackets
    while budget > 0 {
        budget -= 1;
        let (a, b) = (lo.alpha.min(hi.alpha), lo.alpha.max(hi.alpha));
        let width = b - a;
        if width <= f64::EPSILON * b.max(1e-300) {
            break;
        }
        let trial = cubic_min(lo.alpha, lo.value, lo.slope, hi.alpha, hi.value, hi.slope)
            .filter(|t| *t > a + 0.1 * width && *t < b - 0.1 * width)
            .unwrap_or(0.5 * (a + b));
        let cur = eval(trial);
        if !cur.value.is_finite() || !armijo(&cur) || cur.value >= lo.value {
            hi = cur;
            continue;
        }
        if curvature(&cur) {
            return Some(cur);
        }
        if cur.slope * (hi.alpha - lo.alpha) >= 0.0 {
            hi = lo;
        }
        lo = cur;
    }
    // fall back to the best sufficient-decrease point
    if lo.alpha > 0.0 && armijo(&lo) && lo.value < f0 {
        return Some(lo);
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quadratic_five_variables() {
        // f = ½ xᵀAx − bᵀx with A SPD
        let a = [
            [4.0, 1.0, 0.0, 0.0, 0.5],
            [1.0, 3.0, 0.2, 0.0, 0.0],
            [0.0, 0.2, 5.0, 1.0, 0.0],
            [0.0, 0.0, 1.0, 2.0, 0.3],
            [0.5, 0.0, 0.0, 0.3, 6.0],
        ];
        let b = [1.0, -2.0, 0.5, 3.0, -1.0];
        let f = |x: &[f64]| {
            let ax: Vec<f64> = (0..5).map(|i| dot(&a[i], x)).collect();
            let val = 0.5 * dot(x, &ax) - dot(&b, x);
            let grad: Vec<f64> = ax.iter().zip(&b).map(|(p, q)| p - q).collect();
            (val, grad)
        };
        let out = minimize(f, vec![0.0; 5], &BfgsSettings { gtol: 1e-8, ..Default::default() });
        assert_eq!(out.termination, Termination::Converged);
        assert!(out.iterations <= 10, "{} iterations", out.iterations);
        let exact = nalgebra::DMatrix::from_fn(5, 5, |i, j| a[i][j]).lu().solve(&nalgebra::DVector::from_row_slice(&b)).unwrap();
        for i in 0..5 {
            assert!((out.x[i] - exact[i]).abs() < 1e-8);
        }
        assert!(out.trace.windows(2).all(|w| w[1].value <= w[0].value));
    }

    #[test]
    fn rosenbrock() {
        let f = |x: &[f64]| {
            let (a, b) = (x[0], x[1]);
            let val = (1.0 - a).powi(2) + 100.0 * (b - a * a).powi(2);
            let grad = vec![-2.0 * (1.0 - a) - 400.0 * a * (b - a * a), 200.0 * (b - a * a)];
            (val, grad)
        };
        let out = minimize(f, vec![-1.2, 1.0], &BfgsSettings::default());
        assert_eq!(out.termination, Termination::Converged);
        assert!((out.x[0] - 1.0).abs() < 1e-5 && (out.x[1] - 1.0).abs() < 1e-5);
    }

    #[test]
    fn max_iterations_respected() {
        let f = |x: &[f64]| ((x[0] - 3.0).powi(4), vec![4.0 * (x[0] - 3.0).powi(3)]);
        let out = minimize(f, vec![0.0], &BfgsSettings { max_iter: 1, gtol: 1e-14, ..Default::default() });
        assert_eq!(out.termination, Termination::MaxIterations);
        assert_eq!(out.iterations, 1);
        assert_eq!(out.trace.len(), 2);
    }

    #[test]
    fn zero_dimensional_problem_converges_immediately() {
        let out = minimize(|_| (1.5, vec![]), vec![], &BfgsSettings::default());
        assert_eq!(out.termination, Termination::Converged);
        assert_eq!(out.value, 1.5);
    }
}
