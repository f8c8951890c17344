//! Nonlinear conjugate-gradient ascent.
//!
//! Directions follow Polak–Ribière with a restart to steepest ascent whenever
//! the coefficient turns negative, the direction stops being an ascent
//! direction, or `n` iterations (or the preconditioner's refresh period) have
//! passed since the last restart. Steps are found by Armijo backtracking
//! (contraction 0.5, slope factor 1e-4) and then refined by secant
//! interpolation on the directional derivative, which makes the search exact
//! on quadratics. An optional [`Preconditioner`] rescales the gradient before
//! directions are formed.

use serde::{Deserialize, Serialize};

use crate::data::FitConfig;
use crate::error::{Error, Result};

pub const ARMIJO_SLOPE: f64 = 1e-4;
pub const CONTRACTION: f64 = 0.5;
pub const MAX_BACKTRACKS: usize = 50;
const SECANT_STEPS: usize = 4;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OptimizerReport {
    pub iterations_used: usize,
    pub final_objective: f64,
    /// Max-norm of the gradient at the returned point.
    pub final_gradient_norm: f64,
    pub converged: bool,
}

/// Maximizes `objective`, which writes the gradient into its second argument
/// and returns the objective value. A non-finite return marks the point as
/// infeasible; the line search then backs off.
pub fn maximize<F>(objective: F, initial: Vec<f64>, config: &FitConfig) -> Result<(Vec<f64>, OptimizerReport)>
where
    F: FnMut(&[f64], &mut [f64]) -> f64,
{
    maximize_with_trace(objective, initial, config, |_, _| {})
}

/// Like [`maximize`], calling `trace(iteration, objective)` after the start
/// point and after every accepted step.
pub fn maximize_with_trace<F, T>(objective: F, initial: Vec<f64>, config: &FitConfig, trace: T) -> Result<(Vec<f64>, OptimizerReport)>
where
    F: FnMut(&[f64], &mut [f64]) -> f64,
    T: FnMut(usize, f64),
{
    maximize_preconditioned(objective, &mut Identity, initial, config, trace)
}

/// Approximate inverse curvature used to rescale the gradient.
pub trait Preconditioner {
    /// Rebuilds the approximation at `x`; called at every restart.
    fn refresh(&mut self, x: &[f64]);
    /// Writes `z ≈ H⁻¹ g` for a positive definite `H`.
    fn apply(&self, g: &[f64], z: &mut [f64]);
    /// Forces a restart (and refresh) at least this often.
    fn refresh_period(&self) -> Option<usize> {
        None
    }
    /// Number of initial iterations run without rescaling.
    fn warmup(&self) -> usize {
        0
    }
}

/// No rescaling: plain Polak–Ribière.
pub struct Identity;

impl Preconditioner for Identity {
    fn refresh(&mut self, _x: &[f64]) {}

    fn apply(&self, g: &[f64], z: &mut [f64]) {
        z.copy_from_slice(g);
    }
}

/// Preconditioned variant. Directions are built from `z = H⁻¹ g`; the
/// preconditioner is refreshed whenever the method restarts.
pub fn maximize_preconditioned<F, P, T>(
    mut objective: F,
    precond: &mut P,
    initial: Vec<f64>,
    config: &FitConfig,
    mut trace: T,
) -> Result<(Vec<f64>, OptimizerReport)>
where
    F: FnMut(&[f64], &mut [f64]) -> f64,
    P: Preconditioner + ?Sized,
    T: FnMut(usize, f64),
{
    let n = initial.len();
    let mut x = initial;
    let mut g = vec![0.0; n];
    let mut f = objective(&x, &mut g);
    if !f.is_finite() || g.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFiniteStart);
    }
    trace(0, f);

    let mut z = vec![0.0; n];
    let mut d = vec![0.0; n];
    let restart_period = precond.refresh_period().map_or(n, |p| p.min(n)).max(1);
    let warmup = precond.warmup();
    let mut since_restart = 0usize;
    let mut previous: Option<(f64, f64)> = None; // (step, slope)
    let mut iteration = 0usize;
    let mut scratch = LineBuffers::new(n);

    loop {
        let gnorm = max_abs(&g);
        if gnorm <= config.gradient_tolerance {
            return Ok((x, report(iteration, f, gnorm, true)));
        }
        if iteration >= config.max_iterations {
            return Ok((x, report(iteration, f, gnorm, false)));
        }

        let active = iteration >= warmup;
        if active && iteration == warmup {
            since_restart = 0;
        }
        let mut slope = dot(&g, &d);
        let mut steepest = since_restart == 0;
        if steepest || !(slope > 0.0) || since_restart >= restart_period {
            if active {
                precond.refresh(&x);
            }
            scale(precond, active, &g, &mut z);
            d.copy_from_slice(&z);
            slope = dot(&g, &d);
            steepest = true;
            since_restart = 0;
        }
        let mut alpha0 = initial_step(previous, slope, &d);

        let accepted = loop {
            match line_search(&mut objective, &x, f, &d, slope, alpha0, &mut scratch) {
                Some(step) => break step,
                None if !steepest || d != g => {
                    // Plain steepest ascent as the last resort.
                    d.copy_from_slice(&g);
                    slope = dot(&g, &g);
                    steepest = true;
                    since_restart = 0;
                    alpha0 = initial_step(None, slope, &d);
                }
                None => {
                    return Err(Error::LineSearchFailure {
                        iteration,
                        backtracks: MAX_BACKTRACKS,
                        gradient_norm: gnorm,
                    })
                }
            }
        };

        // Polak–Ribière with restart on a negative coefficient.
        let zg_old = dot(&z, &g);
        scale(precond, active, &scratch.best_g, &mut z);
        let mut num = 0.0;
        for ((gn, go), zi) in scratch.best_g.iter().zip(&g).zip(&z) {
            num += zi * (gn - go);
        }
        let beta = if zg_old > 0.0 { (num / zg_old).max(0.0) } else { 0.0 };

        x.copy_from_slice(&scratch.best_x);
        g.copy_from_slice(&scratch.best_g);
        f = accepted.objective;
        for (di, zi) in d.iter_mut().zip(&z) {
            *di = zi + beta * *di;
        }
        since_restart = if beta == 0.0 { 0 } else { since_restart + 1 };
        previous = Some((accepted.step, slope));
        iteration += 1;
        trace(iteration, f);
    }
}

/// `z = H⁻¹ g`, falling back to `g` if the preconditioner is inactive or
/// misbehaves.
fn scale<P: Preconditioner + ?Sized>(precond: &P, active: bool, g: &[f64], z: &mut [f64]) {
    if !active {
        z.copy_from_slice(g);
        return;
    }
    precond.apply(g, z);
    if z.iter().any(|v| !v.is_finite()) || !(dot(g, z) > 0.0) {
        z.copy_from_slice(g);
    }
}

fn report(iterations_used: usize, final_objective: f64, final_gradient_norm: f64, converged: bool) -> OptimizerReport {
    OptimizerReport {
        iterations_used,
        final_objective,
        final_gradient_norm,
        converged,
    }
}

fn initial_step(previous: Option<(f64, f64)>, slope: f64, d: &[f64]) -> f64 {
    let fallback = 1.0 / max_abs(d).max(1.0);
    match previous {
        Some((step, prev_slope)) if step.is_finite() && prev_slope > 0.0 => {
            let a = step * prev_slope / slope;
            if a.is_finite() && a > 0.0 {
                a
            } else {
                fallback
            }
        }
        _ => fallback,
    }
}

struct LineBuffers {
    trial_x: Vec<f64>,
    trial_g: Vec<f64>,
    best_x: Vec<f64>,
    best_g: Vec<f64>,
}

impl LineBuffers {
    fn new(n: usize) -> Self {
        Self {
            trial_x: vec![0.0; n],
            trial_g: vec![0.0; n],
            best_x: vec![0.0; n],
            best_g: vec![0.0; n],
        }
    }
}

struct Accepted {
    step: f64,
    objective: f64,
}

fn line_search<F>(
    objective: &mut F,
    x: &[f64],
    f0: f64,
    d: &[f64],
    slope0: f64,
    alpha0: f64,
    buf: &mut LineBuffers,
) -> Option<Accepted>
where
    F: FnMut(&[f64], &mut [f64]) -> f64,
{
    let mut eval = |alpha: f64, buf: &mut LineBuffers| -> f64 {
        for ((t, xi), di) in buf.trial_x.iter_mut().zip(x).zip(d) {
            *t = xi + alpha * di;
        }
        let v = objective(&buf.trial_x, &mut buf.trial_g);
        if v.is_finite() && buf.trial_g.iter().all(|g| g.is_finite()) {
            v
        } else {
            f64::NEG_INFINITY
        }
    };
    let armijo = |alpha: f64, v: f64| v >= f0 + ARMIJO_SLOPE * alpha * slope0 && v > f64::NEG_INFINITY;

    // Backtracking phase.
    let mut alpha = alpha0;
    let mut found = None;
    for _ in 0..=MAX_BACKTRACKS {
        let v = eval(alpha, buf);
        if armijo(alpha, v) && v >= f0 {
            found = Some(v);
            break;
        }
        alpha *= CONTRACTION;
    }
    let mut best_f = found?;
    let mut best_alpha = alpha;
    buf.best_x.copy_from_slice(&buf.trial_x);
    buf.best_g.copy_from_slice(&buf.trial_g);

    // Secant refinement on φ'(α) = ∇f(x + αd)·d.
    let (mut a_prev, mut s_prev) = (0.0, slope0);
    let mut s_best = dot(&buf.best_g, d);
    for _ in 0..SECANT_STEPS {
        if s_best.abs() <= 1e-3 * slope0 {
            break;
        }
        let denom = s_prev - s_best;
        let candidate = if denom > 0.0 {
            best_alpha + s_best * (best_alpha - a_prev) / denom
        } else if s_best > 0.0 {
            2.0 * best_alpha
        } else {
            break;
        };
        if !(candidate > 0.0) || !candidate.is_finite() || candidate == best_alpha {
            break;
        }
        let v = eval(candidate, buf);
        if !(armijo(candidate, v) && v >= best_f) {
            break;
        }
        a_prev = best_alpha;
        s_prev = s_best;
        best_alpha = candidate;
        best_f = v;
        buf.best_x.copy_from_slice(&buf.trial_x);
        buf.best_g.copy_from_slice(&buf.trial_g);
        s_best = dot(&buf.best_g, d);
    }

    Some(Accepted {
        step: best_alpha,
        objective: best_f,
    })
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub(crate) fn max_abs(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}
