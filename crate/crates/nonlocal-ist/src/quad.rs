//! Complex-valued adaptive Gauss–Kronrod quadrature on top of `gkquad`.

use std::cell::RefCell;
use std::collections::HashMap;

use gkquad::single::Integrator;
use gkquad::Tolerance;

use crate::error::{IstError, Result};
use crate::C64;

/// ∫_a^b f, real and imaginary parts integrated separately. Infinite limits
/// are allowed; `points` are interior break points. A run that stalls at
/// `tol` is repeated once at 1e4·tol.
pub(crate) fn integrate<F: Fn(f64) -> C64>(f: F, a: f64, b: f64, points: &[f64], tol: f64) -> Result<C64> {
    integrate_once(&f, a, b, points, tol).or_else(|_| integrate_once(&f, a, b, points, 1e4 * tol))
}

fn integrate_once<F: Fn(f64) -> C64>(f: &F, a: f64, b: f64, points: &[f64], tol: f64) -> Result<C64> {
    // the imaginary pass mostly revisits the nodes of the real pass
    let memo = RefCell::new(HashMap::<u64, C64>::new());
    let g = |x: f64| *memo.borrow_mut().entry(x.to_bits()).or_insert_with(|| f(x));
    let run = |part: &dyn Fn(C64) -> f64| -> Result<f64> {
        let mut it = Integrator::new(|x: f64| part(g(x)))
            .tolerance(Tolerance::AbsOrRel(tol, tol))
            .max_iters(4000);
        if !points.is_empty() {
            it = it.points(points);
        }
        it.run(a..b)
            .estimate()
            .map_err(|e| IstError::NoConvergence(format!("quadrature on [{a}, {b}]: {e}")))
    };
    Ok(C64::new(run(&|v| v.re)?, run(&|v| v.im)?))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn known_integrals() {
        let v = integrate(|x| C64::new(0.0, x).exp(), 0.0, std::f64::consts::PI, &[], 1e-13).unwrap();
        assert!((v - C64::new(0.0, 2.0)).norm() < 1e-12);
        let g = integrate(|x| C64::from((-x * x).exp()), f64::NEG_INFINITY, f64::INFINITY, &[], 1e-13).unwrap();
        assert!((g.re - std::f64::consts::PI.sqrt()).abs() < 1e-11);
    }
}
