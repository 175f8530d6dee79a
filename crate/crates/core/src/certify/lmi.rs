//! Convex search for a block-form `P` through the Schur-complement form
//!
//! ```text
//! [[F†P + PF + Q, PB], [B†P, -I]] ≺ 0   ⇔   F†P + PF + PBB†P + Q ≺ 0
//! ```
//!
//! which is affine in `P`. Its largest eigenvalue is minimized over the real
//! parameters of `[[P1, P2], [P2#, P1#]]` (`P1` Hermitian, `P2` symmetric) by
//! BFGS on a log-sum-exp smoothing with a decreasing temperature.

use nalgebra::{DMatrix, DVector};

use crate::linalg::{block2x2, conj, hermitian_eigh, lambda_max, real, zeros, CMat, I};

const STAGES: usize = 6;
const ITERS_PER_STAGE: usize = 300;

/// Real basis of block-form Hermitian matrices, orthogonal in the real
/// Frobenius inner product.
pub fn block_basis(n: usize) -> Vec<CMat> {
    let mut out = Vec::new();
    let z = zeros(n, n);
    let hermitian = |h: CMat| block2x2(&h, &z, &z, &conj(&h));
    let symmetric = |s: CMat| block2x2(&z, &s, &conj(&s), &z);
    for r in 0..n {
        let mut h = zeros(n, n);
        h[(r, r)] = real(1.0);
        out.push(hermitian(h));
        for c in r + 1..n {
            let mut h = zeros(n, n);
            h[(r, c)] = real(1.0);
            h[(c, r)] = real(1.0);
            out.push(hermitian(h));
            let mut h = zeros(n, n);
            h[(r, c)] = I;
            h[(c, r)] = -I;
            out.push(hermitian(h));
        }
        for c in r..n {
            for v in [real(1.0), I] {
                let mut s = zeros(n, n);
                s[(r, c)] = v;
                s[(c, r)] = v;
                out.push(symmetric(s));
            }
        }
    }
    out
}

fn inner(a: &CMat, b: &CMat) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| (x.conj() * y).re).sum()
}

struct Problem<'a> {
    f: &'a CMat,
    b: &'a CMat,
    q: &'a CMat,
    basis: Vec<CMat>,
}

impl Problem<'_> {
    fn p_of(&self, theta: &DVector<f64>) -> CMat {
        let dim = self.f.nrows();
        self.basis
            .iter()
            .zip(theta.iter())
            .fold(zeros(dim, dim), |acc, (e, &t)| acc + e * real(t))
    }

    fn lmi(&self, p: &CMat) -> CMat {
        let top = self.f.adjoint() * p + p * self.f + self.q;
        let pb = p * self.b;
        let k = self.b.ncols();
        let m = block2x2(&top, &pb, &pb.adjoint(), &(-CMat::identity(k, k)));
        (&m + m.adjoint()) * real(0.5)
    }

    /// Derivative of the LMI matrix along basis element `e`.
    fn direction(&self, e: &CMat) -> CMat {
        let top = self.f.adjoint() * e + e * self.f;
        let eb = e * self.b;
        let k = self.b.ncols();
        block2x2(&top, &eb, &eb.adjoint(), &zeros(k, k))
    }

    /// Smoothed maximum eigenvalue and its gradient.
    fn smooth(&self, theta: &DVector<f64>, mu: f64, dirs: &[CMat]) -> (f64, DVector<f64>) {
        let (vals, vecs) = hermitian_eigh(&self.lmi(&self.p_of(theta)));
        let top = vals[vals.len() - 1];
        let w: Vec<f64> = vals.iter().map(|v| ((v - top) / mu).exp()).collect();
        let total: f64 = w.iter().sum();
        let value = top + mu * total.ln();
        let weights = CMat::from_diagonal(&DVector::from_iterator(
            w.len(),
            w.iter().map(|x| real(x / total)),
        ));
        let wmat = &vecs * weights * vecs.adjoint();
        let grad = DVector::from_iterator(dirs.len(), dirs.iter().map(|d| inner(&wmat, d)));
        (value, grad)
    }
}

/// Block-form `P` with `λmax(F†P + PF + PGP + Q) < 0` (`G = BB†`) found
/// from `start`, together with that eigenvalue; `None` if the search stalls
/// without reaching feasibility.
pub fn search_block_form(f: &CMat, b: &CMat, q: &CMat, start: &CMat) -> Option<(CMat, f64)> {
    let n = f.nrows() / 2;
    let prob = Problem {
        f,
        b,
        q,
        basis: block_basis(n),
    };
    let dirs: Vec<CMat> = prob.basis.iter().map(|e| prob.direction(e)).collect();
    let g = b * b.adjoint();
    let qmi_max = |p: &CMat| lambda_max(&(f.adjoint() * p + p * f + p * &g * p + q));

    let mut theta = DVector::from_iterator(
        prob.basis.len(),
        prob.basis.iter().map(|e| inner(e, start) / inner(e, e)),
    );
    let dim = theta.len();
    let mut mu = 0.1 * (lambda_max(&prob.lmi(&prob.p_of(&theta))).abs() + 1e-3);

    for _ in 0..STAGES {
        let mut h = DMatrix::<f64>::identity(dim, dim);
        let (mut val, mut grad) = prob.smooth(&theta, mu, &dirs);
        for _ in 0..ITERS_PER_STAGE {
            let p = prob.p_of(&theta);
            let worst = qmi_max(&p);
            if worst < 0.0 && crate::linalg::lambda_min(&p) > 0.0 {
                return Some((p, worst));
            }
            let step_dir = -(&h * &grad);
            let slope = grad.dot(&step_dir);
            if !(slope < 0.0) || grad.norm() < 1e-14 {
                break;
            }
            let mut t = 1.0;
            let mut accepted = None;
            for _ in 0..60 {
                let cand = &theta + &step_dir * t;
                let (v, gr) = prob.smooth(&cand, mu, &dirs);
                if v <= val + 1e-4 * t * slope {
                    accepted = Some((cand, v, gr));
                    break;
                }
                t *= 0.5;
            }
            let Some((cand, v, gr)) = accepted else { break };
            let s = &cand - &theta;
            let y = &gr - &grad;
            let sy = s.dot(&y);
            if sy > 1e-300 {
                let rho = 1.0 / sy;
                let id = DMatrix::<f64>::identity(dim, dim);
                let left = &id - &s * y.transpose() * rho;
                h = &left * &h * left.transpose() + &s * s.transpose() * rho;
            }
            theta = cand;
            val = v;
            grad = gr;
        }
        mu *= 0.1;
    }
    let p = prob.p_of(&theta);
    let worst = qmi_max(&p);
    (worst < 0.0 && crate::linalg::lambda_min(&p) > 0.0).then_some((p, worst))
}
