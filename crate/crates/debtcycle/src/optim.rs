//! Quasi-Newton maximization with finite-difference derivatives.
//!
//! BFGS on the negated objective with a backtracking Armijo line search.
//! Iteration gradients are central differences: with objectives that sum
//! thousands of terms, forward differences carry too much rounding noise to
//! resolve the 1e-6 gradient tolerance. A single coordinate may carry a
//! lower bound (used to floor ln θ), handled by projection: the iterate is
//! clamped and, while the bound is active, the coordinate is frozen out of
//! the search direction.

use nalgebra::{DMatrix, DVector};

/// Optional lower bound on one coordinate.
#[derive(Debug, Clone, Copy)]
pub struct Floor {
    pub index: usize,
    pub min: f64,
}

#[derive(Debug, Clone)]
pub struct MaximizeOptions {
    pub max_iterations: usize,
    /// Convergence: projected-gradient infinity norm below this...
    pub gradient_tol: f64,
    /// ...and relative objective change below this.
    pub relative_tol: f64,
    pub floor: Option<Floor>,
}

impl Default for MaximizeOptions {
    fn default() -> Self {
        Self {
            max_iterations: 500,
            gradient_tol: 1e-6,
            relative_tol: 1e-10,
            floor: None,
        }
    }
}

#[derive(Debug, Clone)]
pub struct MaximizeResult {
    pub x: DVector<f64>,
    pub value: f64,
    pub iterations: usize,
    pub converged: bool,
}

fn project(x: &mut DVector<f64>, floor: Option<Floor>) {
    if let Some(f) = floor {
        if x[f.index] < f.min {
            x[f.index] = f.min;
        }
    }
}

/// Forward-difference gradient (cheaper, noisier than central); non-finite
/// objective values at probe points fall back to a backward difference.
pub fn gradient_fd(f: &dyn Fn(&DVector<f64>) -> f64, x: &DVector<f64>, fx: f64) -> DVector<f64> {
    let n = x.len();
    let mut g = DVector::zeros(n);
    for i in 0..n {
        let h = f64::EPSILON.sqrt() * (1.0 + x[i].abs());
        let mut xp = x.clone();
        xp[i] += h;
        let fp = f(&xp);
        if fp.is_finite() {
            g[i] = (fp - fx) / h;
        } else {
            let mut xm = x.clone();
            xm[i] -= h;
            g[i] = (fx - f(&xm)) / h;
        }
    }
    g
}

/// Central-difference gradient; the optimizer's workhorse.
pub fn gradient_central(f: &dyn Fn(&DVector<f64>) -> f64, x: &DVector<f64>) -> DVector<f64> {
    let n = x.len();
    let mut g = DVector::zeros(n);
    for i in 0..n {
        let h = f64::EPSILON.powf(1.0 / 3.0) * (1.0 + x[i].abs());
        let mut xp = x.clone();
        let mut xm = x.clone();
        xp[i] += h;
        xm[i] -= h;
        g[i] = (f(&xp) - f(&xm)) / (2.0 * h);
    }
    g
}

/// Central-difference Hessian, symmetrized.
pub fn hessian_fd(f: &dyn Fn(&DVector<f64>) -> f64, x: &DVector<f64>) -> DMatrix<f64> {
    let n = x.len();
    let fx = f(x);
    let steps: Vec<f64> = (0..n)
        .map(|i| f64::EPSILON.powf(0.25) * (1.0 + x[i].abs()))
        .collect();
    let mut h = DMatrix::zeros(n, n);
    for i in 0..n {
        let mut xp = x.clone();
        let mut xm = x.clone();
        xp[i] += steps[i];
        xm[i] -= steps[i];
        h[(i, i)] = (f(&xp) - 2.0 * fx + f(&xm)) / (steps[i] * steps[i]);
    }
    for i in 0..n {
        for j in (i + 1)..n {
            let mut xpp = x.clone();
            let mut xpm = x.clone();
            let mut xmp = x.clone();
            let mut xmm = x.clone();
            xpp[i] += steps[i];
            xpp[j] += steps[j];
            xpm[i] += steps[i];
            xpm[j] -= steps[j];
            xmp[i] -= steps[i];
            xmp[j] += steps[j];
            xmm[i] -= steps[i];
            xmm[j] -= steps[j];
            let v = (f(&xpp) - f(&xpm) - f(&xmp) + f(&xmm)) / (4.0 * steps[i] * steps[j]);
            h[(i, j)] = v;
            h[(j, i)] = v;
        }
    }
    h
}

/// Maximize `f` from `x0`. Non-finite objective values are treated as
/// negative infinity so the line search backtracks over them.
pub fn maximize(
    f: &dyn Fn(&DVector<f64>) -> f64,
    x0: DVector<f64>,
    opts: &MaximizeOptions,
) -> MaximizeResult {
    let safe = |x: &DVector<f64>| {
        let v = f(x);
        if v.is_finite() {
            v
        } else {
            f64::NEG_INFINITY
        }
    };

    let n = x0.len();
    let mut x = x0;
    project(&mut x, opts.floor);
    let mut fx = safe(&x);
    if !fx.is_finite() {
        return MaximizeResult {
            x,
            value: fx,
            iterations: 0,
            converged: false,
        };
    }
    let mut grad = gradient_central(f, &x);
    let mut h_inv = DMatrix::identity(n, n);
    let mut converged = false;
    let mut iterations = 0;

    for iter in 0..opts.max_iterations {
        iterations = iter + 1;

        // Freeze the floored coordinate while the bound binds and the
        // gradient points below it.
        let mut pg = grad.clone();
        if let Some(fl) = opts.floor {
            if x[fl.index] <= fl.min && grad[fl.index] < 0.0 {
                pg[fl.index] = 0.0;
            }
        }

        let mut direction = &h_inv * &pg;
        if let Some(fl) = opts.floor {
            if x[fl.index] <= fl.min && grad[fl.index] < 0.0 {
                direction[fl.index] = 0.0;
            }
        }
        // Fall back to steepest ascent when curvature info is unusable.
        if direction.dot(&pg) <= 0.0 {
            h_inv = DMatrix::identity(n, n);
            direction = pg.clone();
        }

        let mut step = 1.0;
        let slope = direction.dot(&pg);
        let mut accepted = None;
        for _ in 0..60 {
            let mut xn = &x + &direction * step;
            project(&mut xn, opts.floor);
            let fn_ = safe(&xn);
            if fn_ >= fx + 1e-4 * step * slope && fn_.is_finite() {
                accepted = Some((xn, fn_));
                break;
            }
            step *= 0.5;
        }
        let Some((x_new, f_new)) = accepted else {
            // No ascent step found; converged if the projected gradient is
            // already flat.
            converged = pg.amax() < opts.gradient_tol;
            break;
        };

        let g_new = gradient_central(f, &x_new);
        let s = &x_new - &x;
        // BFGS runs on the negated objective, whose gradient change is
        // -(g_new - grad); the curvature condition s'y > 0 applies there.
        let yv = &grad - &g_new;
        let sy = s.dot(&yv);
        if sy > 1e-12 * s.norm() * yv.norm() {
            let rho = 1.0 / sy;
            let identity = DMatrix::identity(n, n);
            let left = &identity - &s * yv.transpose() * rho;
            let right = &identity - &yv * s.transpose() * rho;
            h_inv = &left * h_inv * right + &s * s.transpose() * rho;
        }

        let rel_change = (f_new - fx).abs() / (1.0 + fx.abs());
        x = x_new;
        fx = f_new;
        grad = g_new;

        let mut pg = grad.clone();
        if let Some(fl) = opts.floor {
            if x[fl.index] <= fl.min && grad[fl.index] < 0.0 {
                pg[fl.index] = 0.0;
            }
        }
        if pg.amax() < opts.gradient_tol && rel_change < opts.relative_tol {
            converged = true;
            break;
        }
    }

    MaximizeResult {
        x,
        value: fx,
        iterations,
        converged,
    }
}
