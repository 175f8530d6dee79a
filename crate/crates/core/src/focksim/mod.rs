//! Truncated Fock-space oracle.
//!
//! Ladder operators are represented as dense matrices on
//! `dim^modes`-dimensional tensor-product spaces. Products of `d` ladder
//! operators are exact on matrix elements `⟨u|·|v⟩` whenever every mode of
//! `u` and `v` has excitation at most `dim - 1 - ⌈d/2⌉`, since no path of `d`
//! unit steps between such states can reach the truncation edge.

mod identities;
mod lindblad;

pub use identities::{check_commutator_identities, IdentityReport};
pub use lindblad::{
    check_ms_bound, coherent_state, density_from_state, lindblad_evolve, simulate_opa,
    simulate_system, BoundReport, FockTrajectory, LindbladOptions, SimConfig,
};

use crate::error::{Error, Result};
use rand::Rng;
use rand_distr::StandardNormal;

use crate::linalg::{conj, eye, kron, lambda_min, real, zeros, CMat, C64};
use crate::model::LinearQuantumSystem;
use crate::perturbation::PerturbationSeries;

#[derive(Clone, Debug)]
pub struct TruncatedAlgebra {
    pub modes: usize,
    pub dim: usize,
    /// Per-mode annihilation operators on the full space.
    pub a: Vec<CMat>,
}

/// `dim × dim` annihilation matrix with `⟨k-1|a|k⟩ = √k`.
pub fn ladder(dim: usize) -> CMat {
    let mut a = zeros(dim, dim);
    for k in 1..dim {
        a[(k - 1, k)] = real((k as f64).sqrt());
    }
    a
}

pub fn build_algebra(modes: usize, dim: usize) -> Result<TruncatedAlgebra> {
    if dim < 3 {
        return Err(Error::Truncation(format!(
            "Fock dimension {dim} below minimum 3"
        )));
    }
    if modes == 0 {
        return Err(Error::InvalidParameter(
            "algebra needs at least one mode".into(),
        ));
    }
    let single = ladder(dim);
    let id = eye(dim);
    let a = (0..modes)
        .map(|target| {
            (0..modes).fold(eye(1), |acc, m| {
                kron(&acc, if m == target { &single } else { &id })
            })
        })
        .collect();
    Ok(TruncatedAlgebra { modes, dim, a })
}

impl TruncatedAlgebra {
    pub fn size(&self) -> usize {
        self.dim.pow(self.modes as u32)
    }

    pub fn identity(&self) -> CMat {
        eye(self.size())
    }

    /// Per-mode occupation numbers of a basis index (mode 0 most significant).
    pub fn occupation(&self, mut idx: usize) -> Vec<usize> {
        let mut occ = vec![0; self.modes];
        for m in (0..self.modes).rev() {
            occ[m] = idx % self.dim;
            idx /= self.dim;
        }
        occ
    }

    pub fn index_of(&self, occ: &[usize]) -> usize {
        occ.iter().fold(0, |acc, &n| acc * self.dim + n)
    }

    /// Highest per-mode excitation on which products of `degree` ladder
    /// operators are exact, or `None` when no such state exists.
    pub fn safe_cut(&self, degree: usize) -> Option<usize> {
        (self.dim - 1).checked_sub(degree.div_ceil(2))
    }

    pub fn safe_indices(&self, degree: usize) -> Result<Vec<usize>> {
        let cut = self.safe_cut(degree).ok_or_else(|| {
            Error::Truncation(format!(
                "dimension {} too small for operator degree {degree}",
                self.dim
            ))
        })?;
        Ok((0..self.size())
            .filter(|&i| self.occupation(i).iter().all(|&n| n <= cut))
            .collect())
    }

    /// Max entry magnitude of `m` restricted to the safe subspace for `degree`.
    pub fn safe_residual(&self, m: &CMat, degree: usize) -> Result<f64> {
        let idx = self.safe_indices(degree)?;
        let mut worst: f64 = 0.0;
        for &r in &idx {
            for &c in &idx {
                worst = worst.max(m[(r, c)].norm());
            }
        }
        Ok(worst)
    }

    /// Doubled-up vector `x = [a₁, …, aₙ, a₁†, …, aₙ†]`.
    pub fn doubled(&self) -> Vec<CMat> {
        self.a
            .iter()
            .cloned()
            .chain(self.a.iter().map(|a| a.adjoint()))
            .collect()
    }

    /// `x† Q x = Σ_{kl} x_k* Q_{kl} x_l`.
    pub fn quadratic(&self, q: &CMat) -> CMat {
        let x = self.doubled();
        let mut out = zeros(self.size(), self.size());
        for (k, xk) in x.iter().enumerate() {
            let xk_h = xk.adjoint();
            for (l, xl) in x.iter().enumerate() {
                let w = q[(k, l)];
                if w != C64::new(0.0, 0.0) {
                    out += (&xk_h * xl) * w;
                }
            }
        }
        out
    }

    /// `Σ_l row_l x_l` for a row vector over the doubled coordinates.
    pub fn linear(&self, row: &[C64]) -> CMat {
        let x = self.doubled();
        let mut out = zeros(self.size(), self.size());
        for (w, xl) in row.iter().zip(&x) {
            if *w != C64::new(0.0, 0.0) {
                out += xl * *w;
            }
        }
        out
    }

    /// Channel operators `z_i = Σ_j (E1)_ij a_j + (E2)_ij a_j†`.
    pub fn channels(&self, sys: &LinearQuantumSystem) -> Vec<CMat> {
        let e = sys.doubled().e_tilde;
        (0..e.nrows())
            .map(|i| self.linear(&e.row(i).iter().copied().collect::<Vec<_>>()))
            .collect()
    }

    /// Coupling operators `L_k = Σ_j (N1)_kj a_j + (N2)_kj a_j†`.
    pub fn couplings(&self, sys: &LinearQuantumSystem) -> Vec<CMat> {
        let n = sys.doubled().n;
        (0..sys.m)
            .map(|k| self.linear(&n.row(k).iter().copied().collect::<Vec<_>>()))
            .collect()
    }

    pub fn number_sum(&self) -> CMat {
        self.a
            .iter()
            .fold(zeros(self.size(), self.size()), |acc, a| {
                acc + a.adjoint() * a + a * a.adjoint()
            })
    }
}

fn check_modes(alg: &TruncatedAlgebra, sys: &LinearQuantumSystem) -> Result<()> {
    if alg.modes != sys.n {
        return Err(Error::InvalidParameter(format!(
            "algebra has {} modes but the system has {}",
            alg.modes, sys.n
        )));
    }
    Ok(())
}

fn power(m: &CMat, k: u32, id: &CMat) -> CMat {
    (0..k).fold(id.clone(), |acc, _| acc * m)
}

/// Operator `Σ S_{ijkl} z_i^k (z_j*)^l` with the literal left-to-right order.
pub fn operator_of_series(
    alg: &TruncatedAlgebra,
    sys: &LinearQuantumSystem,
    f: &PerturbationSeries,
) -> Result<CMat> {
    check_modes(alg, sys)?;
    if f.channels() > sys.p {
        return Err(Error::InvalidParameter(format!(
            "series has {} channels but the system has {}",
            f.channels(),
            sys.p
        )));
    }
    if f.degree() as usize > alg.dim - 1 {
        return Err(Error::Truncation(format!(
            "series degree {} exceeds truncation {}",
            f.degree(),
            alg.dim - 1
        )));
    }
    let z = alg.channels(sys);
    let zh: Vec<CMat> = z.iter().map(|m| m.adjoint()).collect();
    let id = alg.identity();
    let mut out = zeros(alg.size(), alg.size());
    for ((i, j, k, l), s) in f.terms() {
        out += power(&z[i], k, &id) * power(&zh[j], l, &id) * s;
    }
    Ok(out)
}

/// `½ x†Mx + f(z, z*)`.
pub fn hamiltonian(
    alg: &TruncatedAlgebra,
    sys: &LinearQuantumSystem,
    f: &PerturbationSeries,
) -> Result<CMat> {
    let quad = alg.quadratic(&sys.doubled().m) * real(0.5);
    Ok(quad + operator_of_series(alg, sys, f)?)
}

/// Hermiticity defect of `m` on the safe subspace for `degree`.
pub fn hermiticity_residual(alg: &TruncatedAlgebra, m: &CMat, degree: usize) -> Result<f64> {
    alg.safe_residual(&(m - m.adjoint()), degree)
}

/// Random positive definite `[[P1, P2], [P2#, P1#]]` with Hermitian `P1` and
/// symmetric `P2`, entries standard normal before the diagonal shift.
pub fn random_block_hermitian<R: Rng + ?Sized>(n: usize, rng: &mut R) -> CMat {
    let mut draw = || C64::new(rng.sample(StandardNormal), rng.sample(StandardNormal));
    let mut p1 = zeros(n, n);
    let mut p2 = zeros(n, n);
    for r in 0..n {
        for c in r..n {
            let (a, b) = (draw(), draw());
            p1[(r, c)] = a;
            p1[(c, r)] = a.conj();
            p2[(r, c)] = b;
            p2[(c, r)] = b;
        }
        p1[(r, r)].im = 0.0;
    }
    let p = crate::linalg::block2x2(&p1, &p2, &conj(&p2), &conj(&p1));
    let shift = (0.5 - lambda_min(&p)).max(0.0);
    p + eye(2 * n) * real(shift)
}

pub(crate) fn commutator(a: &CMat, b: &CMat) -> CMat {
    a * b - b * a
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::max_abs as max_entry;
    use crate::linalg::I;
    use crate::opa::{build_opa, OpaParams};

    #[test]
    fn single_mode_ladder_entries() {
        let alg = build_algebra(1, 4).unwrap();
        let a = &alg.a[0];
        assert_eq!(a[(0, 1)], real(1.0));
        assert_eq!(a[(1, 2)], real(2f64.sqrt()));
        assert_eq!(a[(2, 3)], real(3f64.sqrt()));
        assert_eq!(max_entry(a), 3f64.sqrt());
    }

    #[test]
    fn ccr_below_edge() {
        let alg = build_algebra(1, 4).unwrap();
        let a = &alg.a[0];
        let ccr = commutator(a, &a.adjoint()) - alg.identity();
        for k in 0..3 {
            for l in 0..4 {
                assert!(ccr[(k, l)].norm() < 1e-14);
            }
        }
        assert!(ccr[(3, 3)].norm() > 1.0);
    }

    #[test]
    fn distinct_modes_commute() {
        let alg = build_algebra(2, 3).unwrap();
        assert_eq!(alg.size(), 9);
        assert_eq!(max_entry(&commutator(&alg.a[0], &alg.a[1].adjoint())), 0.0);
        assert_eq!(max_entry(&commutator(&alg.a[0], &alg.a[1])), 0.0);
    }

    #[test]
    fn dim_too_small() {
        assert!(matches!(build_algebra(2, 2), Err(Error::Truncation(_))));
    }

    #[test]
    fn safe_cut_policy() {
        let alg = build_algebra(2, 6).unwrap();
        assert_eq!(alg.safe_cut(5), Some(2));
        assert_eq!(alg.safe_cut(2), Some(4));
        assert_eq!(alg.safe_cut(11), None);
        assert_eq!(alg.safe_indices(5).unwrap().len(), 9);
    }

    #[test]
    fn opa_hamiltonian_matches_textbook_form() {
        let chi = 0.1;
        let (sys, f) = build_opa(&OpaParams::new(1.0, 1.0, chi).unwrap()).unwrap();
        let alg = build_algebra(2, 5).unwrap();
        let h = operator_of_series(&alg, &sys, &f).unwrap();
        let (a1, a2) = (&alg.a[0], &alg.a[1]);
        let want = (a2.adjoint() * a1 * a1 - a1.adjoint() * a1.adjoint() * a2) * (I * chi);
        assert!(max_entry(&(h.clone() - want)) < 1e-14);
        assert!(hermiticity_residual(&alg, &h, 3).unwrap() <= 1e-12);
    }

    #[test]
    fn zero_series_is_zero_operator() {
        let (sys, _) = build_opa(&OpaParams::new(1.0, 1.0, 0.1).unwrap()).unwrap();
        let alg = build_algebra(2, 4).unwrap();
        let h = operator_of_series(&alg, &sys, &PerturbationSeries::new(2)).unwrap();
        assert_eq!(max_entry(&h), 0.0);
    }

    #[test]
    fn series_degree_vs_truncation() {
        let (sys, f) = build_opa(&OpaParams::new(1.0, 1.0, 0.1).unwrap()).unwrap();
        let alg = build_algebra(2, 3).unwrap();
        assert!(operator_of_series(&alg, &sys, &f).is_err());
    }
}
