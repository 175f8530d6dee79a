//! Operator identities behind the mean-square bound, checked on the safe
//! subspace of a truncated Fock space.

use serde::{Deserialize, Serialize};

use super::{commutator, operator_of_series, TruncatedAlgebra};
use crate::certify::{lambda_tilde, mu_constants};
use crate::error::{Error, Result};
use crate::linalg::{real, zeros, CMat, C64};
use crate::model::{LinearQuantumSystem, StructureMatrices};
use crate::perturbation::PerturbationSeries;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IdentityCheck {
    pub name: String,
    /// Ladder-operator degree that fixes the safe subspace.
    pub degree: usize,
    pub residual: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IdentityReport {
    pub dim: usize,
    pub checks: Vec<IdentityCheck>,
}

impl IdentityReport {
    pub fn max_residual(&self) -> f64 {
        self.checks.iter().map(|c| c.residual).fold(0.0, f64::max)
    }

    pub fn get(&self, name: &str) -> Option<&IdentityCheck> {
        self.checks.iter().find(|c| c.name == name)
    }
}

fn entry(alg: &TruncatedAlgebra, name: &str, degree: usize, m: &CMat) -> Result<IdentityCheck> {
    Ok(IdentityCheck {
        name: name.into(),
        degree,
        residual: alg.safe_residual(m, degree)?,
    })
}

/// Residuals of
///
/// * `ccr`: `[x_k, x_l†] = J_kl`
/// * `quadratic_hamiltonian`: `[V, ½x†Mx] = x†(PJM − MJP)x`
/// * `dissipation`: `½Σ_k (L_k†[V, L_k] + [L_k†, V] L_k) = λ̃ − ½ x†(N†JNJP + PJN†JN)x`
/// * `gradient`: `[x, V] = 2JPx`
/// * `double_commutator`: `[z_i, [z_i, V]] = μ_i`
/// * `series_commutator`:
///   `[V, f] = Σ [V, z_i] ∂f/∂z_i − Σ (∂f/∂z_i)* [z_i*, V] − ½ Σ μ_i ∂²f/∂z_i² + ½ Σ (∂²f/∂z_i²)* μ_i*`
///
/// for `V = x†Px`; `P` must have the block form.
pub fn check_commutator_identities(
    alg: &TruncatedAlgebra,
    sys: &LinearQuantumSystem,
    p: &CMat,
    f: &PerturbationSeries,
) -> Result<IdentityReport> {
    let n = sys.n;
    if p.shape() != (2 * n, 2 * n) {
        return Err(Error::Dimension {
            left: "P",
            left_shape: p.shape(),
            right: "2n×2n",
            right_shape: (2 * n, 2 * n),
        });
    }
    let d = sys.doubled();
    let s = StructureMatrices::new(n);
    let j_out = StructureMatrices::new(sys.m).j;
    let x = alg.doubled();
    let size = alg.size();
    let id = alg.identity();
    let v = alg.quadratic(p);
    let mut checks = Vec::new();
    let mut ccr: f64 = 0.0;
    for k in 0..2 * n {
        for l in 0..2 * n {
            let m = commutator(&x[k], &x[l].adjoint()) - &id * s.j[(k, l)];
            ccr = ccr.max(alg.safe_residual(&m, 2)?);
        }
    }
    checks.push(IdentityCheck {
        name: "ccr".into(),
        degree: 2,
        residual: ccr,
    });

    let h0 = alg.quadratic(&d.m) * real(0.5);
    let lhs = commutator(&v, &h0);
    let rhs = alg.quadratic(&(p * &s.j * &d.m - &d.m * &s.j * p));
    checks.push(entry(alg, "quadratic_hamiltonian", 4, &(lhs - rhs))?);

    let mut diss = zeros(size, size);
    for l in alg.couplings(sys) {
        let lh = l.adjoint();
        diss += &lh * commutator(&v, &l) + commutator(&lh, &v) * &l;
    }
    diss *= real(0.5);
    let q = d.n.adjoint() * &j_out * &d.n * &s.j * p + p * &s.j * d.n.adjoint() * &j_out * &d.n;
    let rhs = &id * real(lambda_tilde(p, &d.n)) - alg.quadratic(&q) * real(0.5);
    checks.push(entry(alg, "dissipation", 4, &(diss - rhs))?);

    let two_jp = &s.j * p * real(2.0);
    let mut grad: f64 = 0.0;
    for (k, xk) in x.iter().enumerate() {
        let row: Vec<C64> = two_jp.row(k).iter().copied().collect();
        let m = commutator(xk, &v) - alg.linear(&row);
        grad = grad.max(alg.safe_residual(&m, 3)?);
    }
    checks.push(IdentityCheck {
        name: "gradient".into(),
        degree: 3,
        residual: grad,
    });

    let mu = mu_constants(p, &d.e_tilde);
    let z = alg.channels(sys);
    let mut dc: f64 = 0.0;
    for (zi, &mi) in z.iter().zip(&mu) {
        let m = commutator(zi, &commutator(zi, &v)) - &id * mi;
        dc = dc.max(alg.safe_residual(&m, 4)?);
    }
    checks.push(IdentityCheck {
        name: "double_commutator".into(),
        degree: 4,
        residual: dc,
    });

    if !f.is_empty() {
        let degree = 2 + f.degree() as usize;
        let lhs = commutator(&v, &operator_of_series(alg, sys, f)?);
        let mut rhs = zeros(size, size);
        for (i, zi) in z.iter().enumerate().take(f.channels()) {
            let d1 = operator_of_series(alg, sys, &f.partial_z(i)?)?;
            let d2 = operator_of_series(alg, sys, &f.second_partial_z(i)?)?;
            rhs += commutator(&v, zi) * &d1;
            rhs -= d1.adjoint() * commutator(&zi.adjoint(), &v);
            rhs -= &d2 * (mu[i] * 0.5);
            rhs += d2.adjoint() * (mu[i].conj() * 0.5);
        }
        checks.push(entry(alg, "series_commutator", degree, &(lhs - rhs))?);
    }

    Ok(IdentityReport {
        dim: alg.dim,
        checks,
    })
}
