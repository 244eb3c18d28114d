//! Box-constrained limited-memory BFGS.
//!
//! Projected-gradient variant: the two-loop recursion runs on the free
//! variables only, and steps are projected back into the box with an Armijo
//! backtracking search along the projected path.

use std::collections::VecDeque;

use nalgebra::DVector;

use super::normal::Interval;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy)]
pub struct LbfgsbOptions {
    pub history: usize,
    pub max_iter: usize,
    pub pg_tol: f64,
    pub armijo: f64,
}

impl Default for LbfgsbOptions {
    fn default() -> Self {
        LbfgsbOptions { history: 10, max_iter: 200, pg_tol: 1e-6, armijo: 1e-4 }
    }
}

#[derive(Debug, Clone)]
pub struct Minimum {
    pub x: DVector<f64>,
    pub value: f64,
    pub iterations: usize,
    /// Projected-gradient sup-norm at `x`.
    pub pg_norm: f64,
    pub converged: bool,
}

fn project(x: &mut DVector<f64>, bounds: &[Interval]) {
    for (xi, b) in x.iter_mut().zip(bounds) {
        *xi = xi.clamp(b.lower, b.upper);
    }
}

fn projected_gradient(x: &DVector<f64>, g: &DVector<f64>, bounds: &[Interval]) -> DVector<f64> {
    DVector::from_iterator(
        x.len(),
        x.iter().zip(g.iter()).zip(bounds).map(|((&xi, &gi), b)| {
            let stepped = (xi - gi).clamp(b.lower, b.upper);
            xi - stepped
        }),
    )
}

/// Minimize `f` inside `bounds`. `f` returns (value, gradient); a non-finite
/// value is treated as infeasible and rejected by the line search.
pub fn boxed_quasi_newton<F>(mut f: F, x0: &[f64], bounds: &[Interval], opts: LbfgsbOptions) -> Result<Minimum>
where
    F: FnMut(&DVector<f64>) -> (f64, DVector<f64>),
{
    if bounds.len() != x0.len() {
        return Err(Error::Input(format!("{} bounds for {} coordinates", bounds.len(), x0.len())));
    }
    let mut x = DVector::from_column_slice(x0);
    project(&mut x, bounds);
    let (mut fx, mut g) = f(&x);
    if !fx.is_finite() || g.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidStart);
    }
    let mut mem: VecDeque<(DVector<f64>, DVector<f64>, f64)> = VecDeque::with_capacity(opts.history);
    let mut iter = 0;
    loop {
        let pg = projected_gradient(&x, &g, bounds);
        let pg_norm = pg.amax();
        if pg_norm <= opts.pg_tol {
            return Ok(Minimum { x, value: fx, iterations: iter, pg_norm, converged: true });
        }
        if iter >= opts.max_iter {
            return Ok(Minimum { x, value: fx, iterations: iter, pg_norm, converged: false });
        }
        iter += 1;

        // Variables pinned at a bound with the gradient pushing outward stay fixed.
        let free: Vec<bool> = x
            .iter()
            .zip(g.iter())
            .zip(bounds)
            .map(|((&xi, &gi), b)| !((xi <= b.lower && gi > 0.0) || (xi >= b.upper && gi < 0.0)))
            .collect();
        let mask = |v: &DVector<f64>| DVector::from_iterator(v.len(), v.iter().zip(&free).map(|(&a, &f)| if f { a } else { 0.0 }));

        let mut q = mask(&g);
        let mut alphas = Vec::with_capacity(mem.len());
        for (s, y, rho) in mem.iter().rev() {
            let a = rho * mask(s).dot(&q);
            q -= mask(y) * a;
            alphas.push(a);
        }
        if let Some((s, y, _)) = mem.back() {
            let (ms, my) = (mask(s), mask(y));
            let yy = my.dot(&my);
            if yy > 0.0 {
                q *= ms.dot(&my) / yy;
            }
        }
        for ((s, y, rho), a) in mem.iter().zip(alphas.into_iter().rev()) {
            let b = rho * mask(y).dot(&q);
            q += mask(s) * (a - b);
        }
        let mut d = -mask(&q);
        if d.dot(&g) >= 0.0 || d.iter().any(|v| !v.is_finite()) {
            mem.clear();
            d = -mask(&g);
        }
        let mut step = if mem.is_empty() { (1.0 / d.amax()).min(1.0) } else { 1.0 };

        let mut accepted = None;
        for _ in 0..60 {
            let mut xn = &x + &d * step;
            project(&mut xn, bounds);
            let (fn_, gn) = f(&xn);
            let decrease = g.dot(&(&xn - &x));
            if fn_.is_finite() && gn.iter().all(|v| v.is_finite()) && fn_ <= fx + opts.armijo * decrease {
                accepted = Some((xn, fn_, gn));
                break;
            }
            step *= 0.5;
        }
        let Some((xn, fn_, gn)) = accepted else {
            // No acceptable step along the projected path: stationary to working precision.
            return Ok(Minimum { x, value: fx, iterations: iter, pg_norm, converged: false });
        };
        let s = &xn - &x;
        let y = &gn - &g;
        let sy = s.dot(&y);
        if sy > 1e-12 * s.norm() * y.norm() && sy > 0.0 {
            if mem.len() == opts.history {
                mem.pop_front();
            }
            mem.push_back((s, y, 1.0 / sy));
        }
        let stalled = (fx - fn_).abs() <= 1e-15 * fx.abs().max(1.0) && (&xn - &x).amax() <= 1e-15;
        x = xn;
        fx = fn_;
        g = gn;
        if stalled {
            let pg_norm = projected_gradient(&x, &g, bounds).amax();
            return Ok(Minimum { x, value: fx, iterations: iter, converged: pg_norm <= opts.pg_tol, pg_norm });
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn quad(x: &DVector<f64>) -> (f64, DVector<f64>) {
        ((x[0] - 3.0).powi(2), DVector::from_element(1, 2.0 * (x[0] - 3.0)))
    }

    #[test]
    fn unconstrained_parabola() {
        let m = boxed_quasi_newton(quad, &[0.0], &[Interval::REAL_LINE], LbfgsbOptions::default()).unwrap();
        assert!(m.converged);
        assert_abs_diff_eq!(m.x[0], 3.0, epsilon = 1e-7);
    }

    #[test]
    fn active_upper_bound() {
        let b = Interval { lower: f64::NEG_INFINITY, upper: 1.0 };
        let m = boxed_quasi_newton(quad, &[0.0], &[b], LbfgsbOptions::default()).unwrap();
        assert!(m.converged);
        assert_eq!(m.x[0], 1.0);
        assert_abs_diff_eq!(m.value, 4.0);
    }

    #[test]
    fn rosenbrock() {
        let rosen = |x: &DVector<f64>| {
            let (a, b) = (x[0], x[1]);
            let v = (1.0 - a).powi(2) + 100.0 * (b - a * a).powi(2);
            let g = DVector::from_vec(vec![-2.0 * (1.0 - a) - 400.0 * a * (b - a * a), 200.0 * (b - a * a)]);
            (v, g)
        };
        let m = boxed_quasi_newton(rosen, &[-1.2, 1.0], &[Interval::REAL_LINE; 2], LbfgsbOptions::default()).unwrap();
        assert!((m.x[0] - 1.0).abs() < 1e-4 && (m.x[1] - 1.0).abs() < 1e-4, "{:?}", m);
        assert!(m.value <= 24.2);
    }

    #[test]
    fn invalid_start_is_reported() {
        let bad = |_: &DVector<f64>| (f64::NAN, DVector::from_element(1, 0.0));
        assert!(matches!(
            boxed_quasi_newton(bad, &[0.0], &[Interval::REAL_LINE], LbfgsbOptions::default()),
            Err(Error::InvalidStart)
        ));
    }

    #[test]
    fn result_stays_in_box_and_improves() {
        let f = |x: &DVector<f64>| {
            let v = (x[0] + 2.0).powi(2) + (x[1] - 5.0).powi(2) + x[0] * x[1];
            (v, DVector::from_vec(vec![2.0 * (x[0] + 2.0) + x[1], 2.0 * (x[1] - 5.0) + x[0]]))
        };
        let bounds = [Interval { lower: -1.0, upper: 1.0 }, Interval { lower: 0.0, upper: 2.0 }];
        let x0 = [0.5, 0.5];
        let start = f(&DVector::from_column_slice(&x0)).0;
        let m = boxed_quasi_newton(f, &x0, &bounds, LbfgsbOptions::default()).unwrap();
        assert!(m.value <= start);
        for (xi, b) in m.x.iter().zip(&bounds) {
            assert!(*xi >= b.lower && *xi <= b.upper);
        }
        assert_eq!(m.x[0], -1.0);
        assert_eq!(m.x[1], 2.0);
    }
}
