//! Newton iteration for `A†P + PA + PGP + Q = 0` with `G = BB† ⪰ 0`,
//! started from the Lyapunov solution of `A†P₀ + P₀A + Q = 0`.

use crate::error::{Error, Result};
use crate::linalg::{hermitian_part, solve_lyapunov, spectral_abscissa, CMat};

pub const MAX_NEWTON_STEPS: usize = 100;

#[derive(Clone, Debug)]
pub struct NewtonOutcome {
    pub p: CMat,
    pub steps: usize,
    pub residual: f64,
}

pub fn residual(a: &CMat, g: &CMat, q: &CMat, p: &CMat) -> CMat {
    a.adjoint() * p + p * a + p * g * p + q
}

/// Stabilizing solution of the Riccati equation; `tol` bounds the Frobenius
/// norm of the residual.
pub fn solve_care_newton(a: &CMat, g: &CMat, q: &CMat, tol: f64) -> Result<NewtonOutcome> {
    let mut p = hermitian_part(&solve_lyapunov(a, q)?);
    let mut res = residual(a, g, q, &p).norm();
    for step in 0..=MAX_NEWTON_STEPS {
        if !res.is_finite() {
            break;
        }
        if res <= tol {
            return Ok(NewtonOutcome {
                p,
                steps: step,
                residual: res,
            });
        }
        if step == MAX_NEWTON_STEPS {
            break;
        }
        let closed = a + g * &p;
        let abscissa = spectral_abscissa(&closed)?;
        if abscissa >= 0.0 {
            return Err(Error::QmiInfeasible(format!(
                "Newton iterate {step} lost stability (closed-loop abscissa {abscissa:.3e}, residual {res:.3e})"
            )));
        }
        let rhs = q - &p * g * &p;
        p = hermitian_part(&solve_lyapunov(&closed, &rhs)?);
        res = residual(a, g, q, &p).norm();
    }
    Err(Error::QmiInfeasible(format!(
        "Newton iteration did not converge in {MAX_NEWTON_STEPS} steps (residual {res:.3e}, target {tol:.3e})"
    )))
}
