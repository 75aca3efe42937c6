//! Limited-memory BFGS with a strong-Wolfe line search.

use std::collections::VecDeque;

use ndarray::Array1;

use crate::error::{Error, Result};
use crate::scalar::Real;

#[derive(Debug, Clone, PartialEq)]
pub struct LbfgsConfig<T> {
    pub max_iterations: usize,
    /// Stop once the Euclidean gradient norm falls to this.
    pub gradient_tolerance: T,
    /// Number of `(s, y)` pairs kept for the inverse-Hessian estimate.
    pub memory: usize,
    /// Sufficient-decrease constant.
    pub c1: T,
    /// Curvature constant.
    pub c2: T,
}

impl<T: Real> Default for LbfgsConfig<T> {
    fn default() -> Self {
        Self {
            max_iterations: 200,
            gradient_tolerance: T::lit(1e-8),
            memory: 10,
            c1: T::lit(1e-4),
            c2: T::lit(0.9),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Termination {
    GradientTolerance,
    /// The line search could not find an acceptable step.
    StepCollapse,
    MaxIterations,
}

#[derive(Debug, Clone)]
pub struct Minimum<T> {
    pub params: Array1<T>,
    pub value: T,
    pub gradient_norm: T,
    pub iterations: usize,
    pub evaluations: usize,
    pub termination: Termination,
}

struct Probe<T> {
    alpha: T,
    value: T,
    slope: T,
    x: Array1<T>,
    grad: Array1<T>,
}

/// Minimizes `objective`, which returns the value at `x` and writes the
/// gradient into its second argument.
///
/// Every accepted step satisfies the sufficient-decrease condition, so the
/// returned value never exceeds the value at `x0`.
pub fn quasi_newton_minimize<T, F>(mut objective: F, x0: Array1<T>, cfg: &LbfgsConfig<T>) -> Result<Minimum<T>>
where
    T: Real,
    F: FnMut(&Array1<T>, &mut Array1<T>) -> T,
{
    if !(cfg.gradient_tolerance > T::zero()) || cfg.memory == 0 {
        return Err(Error::arg("gradient tolerance must be positive and memory at least 1"));
    }
    let n = x0.len();
    let mut x = x0;
    let mut grad = Array1::zeros(n);
    let mut value = objective(&x, &mut grad);
    let mut evaluations = 1;
    if !value.is_finite() || grad.iter().any(|g| !g.is_finite()) {
        return Err(Error::NonFinite {
            iteration: 0,
            value: value.to_f64_lossy(),
        });
    }

    let mut history: VecDeque<(Array1<T>, Array1<T>, T)> = VecDeque::with_capacity(cfg.memory);
    let mut iterations = 0;
    let termination = loop {
        let gnorm = norm(&grad);
        if gnorm <= cfg.gradient_tolerance {
            break Termination::GradientTolerance;
        }
        if iterations >= cfg.max_iterations {
            break Termination::MaxIterations;
        }

        let mut dir = two_loop(&grad, &history);
        let mut slope = dir.dot(&grad);
        if !(slope < T::zero()) {
            history.clear();
            dir = grad.mapv(|g| -g);
            slope = -gnorm * gnorm;
        }
        let alpha0 = if history.is_empty() {
            T::one().min(T::one() / norm(&dir))
        } else {
            T::one()
        };

        let mut eval = |alpha: T| {
            let xa = &x + &(&dir * alpha);
            let mut ga = Array1::zeros(n);
            let va = objective(&xa, &mut ga);
            let sa = ga.dot(&dir);
            Probe {
                alpha,
                value: va,
                slope: sa,
                x: xa,
                grad: ga,
            }
        };
        let (probe, used) = line_search(&mut eval, value, slope, alpha0, cfg);
        evaluations += used;
        let Some(probe) = probe else {
            break Termination::StepCollapse;
        };

        let s = &probe.x - &x;
        let y = &probe.grad - &grad;
        let sy = s.dot(&y);
        if sy > T::epsilon() * norm(&s) * norm(&y) {
            if history.len() == cfg.memory {
                history.pop_front();
            }
            history.push_back((s, y, T::one() / sy));
        }
        x = probe.x;
        grad = probe.grad;
        value = probe.value;
        iterations += 1;
        debug_assert!(probe.alpha > T::zero());
    };

    Ok(Minimum {
        gradient_norm: norm(&grad),
        params: x,
        value,
        iterations,
        evaluations,
        termination,
    })
}

fn norm<T: Real>(v: &Array1<T>) -> T {
    v.dot(v).sqrt()
}

/// Search direction `-H·g` from the stored curvature pairs.
fn two_loop<T: Real>(grad: &Array1<T>, history: &VecDeque<(Array1<T>, Array1<T>, T)>) -> Array1<T> {
    let mut q = grad.clone();
    let mut alphas = Vec::with_capacity(history.len());
    for (s, y, rho) in history.iter().rev() {
        let a = *rho * s.dot(&q);
        q.scaled_add(-a, y);
        alphas.push(a);
    }
    if let Some((s, y, _)) = history.back() {
        let gamma = s.dot(y) / y.dot(y);
        q *= gamma;
    }
    for ((s, y, rho), a) in history.iter().zip(alphas.into_iter().rev()) {
        let b = *rho * y.dot(&q);
        q.scaled_add(a - b, s);
    }
    q.mapv_inplace(|v| -v);
    q
}

const MAX_LINE_EVALS: usize = 60;

/// Strong-Wolfe bracketing and zoom. Returns the accepted probe, if any, and
/// the number of objective evaluations spent.
fn line_search<T, E>(eval: &mut E, f0: T, slope0: T, alpha0: T, cfg: &LbfgsConfig<T>) -> (Option<Probe<T>>, usize)
where
    T: Real,
    E: FnMut(T) -> Probe<T>,
{
    let armijo = |p: &Probe<T>| p.value.is_finite() && p.value <= f0 + cfg.c1 * p.alpha * slope0;
    let curvature = |p: &Probe<T>| p.slope.abs() <= -cfg.c2 * slope0;

    let mut used = 0;
    let mut prev = Probe {
        alpha: T::zero(),
        value: f0,
        slope: slope0,
        x: Array1::zeros(0),
        grad: Array1::zeros(0),
    };
    let mut alpha = alpha0;
    let mut first = true;
    let (mut lo, mut hi) = loop {
        if used >= MAX_LINE_EVALS {
            return (None, used);
        }
        let p = eval(alpha);
        used += 1;
        if !armijo(&p) || (!first && p.value >= prev.value) {
            break (prev, p);
        }
        if curvature(&p) {
            return (Some(p), used);
        }
        if p.slope >= T::zero() {
            break (p, prev);
        }
        alpha = alpha + alpha;
        prev = p;
        first = false;
    };

    // Zoom: `lo` satisfies sufficient decrease with the lowest value so far.
    while used < MAX_LINE_EVALS {
        let (a, b) = (lo.alpha, hi.alpha);
        let width = (b - a).abs();
        if width <= T::epsilon() * a.abs().max(b.abs()) {
            break;
        }
        let mut trial = interpolate_min(&lo, &hi);
        let (left, right) = (a.min(b), a.max(b));
        let margin = T::lit(0.1) * width;
        if !trial.is_finite() || trial < left + margin || trial > right - margin {
            trial = (a + b) / T::lit(2.0);
        }
        let p = eval(trial);
        used += 1;
        if !armijo(&p) || p.value >= lo.value {
            hi = p;
        } else {
            if curvature(&p) {
                return (Some(p), used);
            }
            if p.slope * (hi.alpha - lo.alpha) >= T::zero() {
                hi = lo;
            }
            lo = p;
        }
    }

    // Out of budget: fall back to the best sufficient-decrease point found.
    if lo.alpha > T::zero() && lo.value < f0 {
        (Some(lo), used)
    } else {
        (None, used)
    }
}

/// Minimizer of the cubic matching values and slopes at both ends; NaN when
/// the cubic has no interior minimum or an end lacks a finite value.
fn interpolate_min<T: Real>(a: &Probe<T>, b: &Probe<T>) -> T {
    if !(a.value.is_finite() && b.value.is_finite() && a.slope.is_finite() && b.slope.is_finite()) {
        return T::nan();
    }
    let three = T::lit(3.0);
    let d1 = a.slope + b.slope - three * (a.value - b.value) / (a.alpha - b.alpha);
    let disc = d1 * d1 - a.slope * b.slope;
    if disc < T::zero() {
        return T::nan();
    }
    let sign = if b.alpha >= a.alpha { T::one() } else { -T::one() };
    let d2 = sign * disc.sqrt();
    b.alpha - (b.alpha - a.alpha) * (b.slope + d2 - d1) / (b.slope - a.slope + d2 + d2)
}
