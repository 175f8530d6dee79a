//! Small-gain certification: Hurwitz test on `F`, the two equivalent H∞
//! conditions, a Lyapunov matrix `P` from the Riccati-type inequality and the
//! constants `c₁, c₂, c₃` of the mean-square bound
//! `⟨x†x⟩(t) ≤ c₁ e^{-c₂ t} ⟨x†x⟩(0) + c₃`.

pub mod hinf;
pub mod lmi;
pub mod riccati;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{
    block_diag2, conj, eigenvalues, eye, hermitian_eigenvalues, hermitian_part, inverse,
    lambda_max, real, zeros, CMat, C64, I,
};
use crate::model::{LinearQuantumSystem, StructureMatrices};
use crate::perturbation::SectorBounds;

pub use hinf::hinf_norm;

/// Spectral abscissa must lie below `-HURWITZ_TOL`.
pub const HURWITZ_TOL: f64 = 1e-9;
/// Relative agreement required between the primary and reduced norms.
pub const NORM_AGREEMENT: f64 = 1e-6;

/// `F = -i J M - ½ J N† J N`.
pub fn build_f(m: &CMat, n: &CMat) -> Result<CMat> {
    let dim = m.nrows();
    if m.ncols() != dim || !dim.is_multiple_of(2) {
        return Err(Error::Dimension {
            left: "M",
            left_shape: m.shape(),
            right: "2n×2n",
            right_shape: (dim, dim),
        });
    }
    if n.ncols() != dim || !n.nrows().is_multiple_of(2) {
        return Err(Error::Dimension {
            left: "N",
            left_shape: n.shape(),
            right: "M",
            right_shape: m.shape(),
        });
    }
    let j_state = StructureMatrices::new(dim / 2).j;
    let j_out = StructureMatrices::new(n.nrows() / 2).j;
    Ok(-(&j_state * m) * I - (&j_state * n.adjoint() * j_out * n) * real(0.5))
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct HurwitzCheck {
    pub hurwitz: bool,
    pub abscissa: f64,
}

pub fn is_hurwitz(f: &CMat, tol: f64) -> Result<HurwitzCheck> {
    if f.nrows() != f.ncols() {
        return Err(Error::Dimension {
            left: "F",
            left_shape: f.shape(),
            right: "square",
            right_shape: (f.nrows(), f.nrows()),
        });
    }
    let abscissa = eigenvalues(f)?
        .iter()
        .map(|z| z.re)
        .fold(f64::NEG_INFINITY, f64::max);
    Ok(HurwitzCheck {
        hurwitz: abscissa < -tol,
        abscissa,
    })
}

/// Input/output matrices of the two transfer functions whose norms are compared.
pub struct ChannelMaps {
    /// `B = J Σ Ẽᵀ`, `C = Ẽ^# Σ`.
    pub primary: (CMat, CMat),
    /// `B = J Ẽ†`, `C = Ẽ`.
    pub reduced: (CMat, CMat),
}

pub fn channel_maps(sys: &LinearQuantumSystem) -> ChannelMaps {
    let s = sys.structure();
    let e = sys.doubled().e_tilde;
    ChannelMaps {
        primary: (&s.j * &s.sigma * e.transpose(), conj(&e) * &s.sigma),
        reduced: (&s.j * e.adjoint(), e),
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct HinfCheck {
    pub primary: f64,
    pub reduced: f64,
    pub pass: bool,
}

/// Both H∞ norms; passes iff the reduced norm is below `γ/2`.
pub fn hinf_condition(sys: &LinearQuantumSystem, gamma: f64) -> Result<HinfCheck> {
    let d = sys.doubled();
    let f = build_f(&d.m, &d.n)?;
    let maps = channel_maps(sys);
    let primary = hinf_norm(&f, &maps.primary.0, &maps.primary.1)?;
    let reduced = hinf_norm(&f, &maps.reduced.0, &maps.reduced.1)?;
    if (primary - reduced).abs() > NORM_AGREEMENT * (1.0 + reduced) {
        return Err(Error::NormMismatch { primary, reduced });
    }
    Ok(HinfCheck {
        primary,
        reduced,
        pass: reduced < gamma / 2.0,
    })
}

/// How the block-structured Lyapunov matrix was obtained.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BlockRoute {
    /// The Riccati solution already had the `[[P1, P2], [P2#, P1#]]` form.
    Direct,
    /// Average of the Riccati solution and its Σ-conjugate.
    Symmetrized,
    /// Riccati equation with Σ-symmetrized (dominating) quadratic and constant terms.
    Dominated,
    /// Positive multiple of the symmetrized solution.
    ScaledSymmetrized,
    /// Direct convex search over block-form matrices.
    ConvexSearch,
}

/// Terms of the matrix inequality `F†P + PF + P G P + Q ≺ 0`.
#[derive(Clone, Debug)]
pub struct QmiTerms {
    pub f: CMat,
    /// `2 J Σ Ẽᵀ`
    pub b: CMat,
    /// `B B† = 4 J Σ Ẽᵀ Ẽ^# Σ J`
    pub g: CMat,
    /// `γ⁻² Σ Ẽᵀ Ẽ^# Σ`
    pub q: CMat,
    pub sigma: CMat,
}

impl QmiTerms {
    pub fn new(sys: &LinearQuantumSystem, gamma: f64) -> Result<Self> {
        let s = sys.structure();
        let d = sys.doubled();
        let f = build_f(&d.m, &d.n)?;
        let b = (&s.j * &s.sigma * d.e_tilde.transpose()) * real(2.0);
        let c = (conj(&d.e_tilde) * &s.sigma) * real(1.0 / gamma);
        Ok(QmiTerms {
            f,
            g: &b * b.adjoint(),
            b,
            q: c.adjoint() * &c,
            sigma: s.sigma,
        })
    }

    pub fn lhs(&self, p: &CMat) -> CMat {
        hermitian_part(&(self.f.adjoint() * p + p * &self.f + p * &self.g * p + &self.q))
    }

    pub fn default_eps(&self) -> f64 {
        1e-6 * (1.0 + lambda_max(&self.q).max(0.0))
    }

    fn sigma_conj(&self, m: &CMat) -> CMat {
        &self.sigma * conj(m) * &self.sigma
    }
}

#[derive(Clone, Debug)]
pub struct QmiSolution {
    pub p: CMat,
    /// Largest eigenvalue of the inequality's left-hand side at `p`.
    pub lhs_max_eig: f64,
    pub route: BlockRoute,
    pub newton_steps: usize,
    pub eps: f64,
}

fn block_defect(p: &CMat, sigma: &CMat) -> f64 {
    (p - sigma * conj(p) * sigma).norm()
}

fn accept(terms: &QmiTerms, p: &CMat) -> Option<f64> {
    let eigs = hermitian_eigenvalues(p);
    if eigs.first().is_none_or(|&v| v <= 0.0) {
        return None;
    }
    let worst = lambda_max(&terms.lhs(p));
    (worst < 0.0).then_some(worst)
}

/// Hermitian `P ≻ 0` of block form satisfying the strict matrix inequality.
///
/// The regularized Riccati equation `F†P + PF + PGP + Q + εI = 0` is solved
/// by Newton's method. Its solution is returned when it already has the block
/// form or when Σ-averaging keeps it feasible; otherwise the Σ-invariant
/// equation with `G + ΣG^#Σ` and `Q + ΣQ^#Σ` (whose unique stabilizing
/// solution has the block form and dominates the original inequality) is
/// solved. Failing that, a positive multiple of the averaged solution is
/// tried, and as a last resort a convex search over block-form matrices
/// ([`lmi::search_block_form`]) starts from it.
pub fn solve_qmi(sys: &LinearQuantumSystem, gamma: f64, eps: Option<f64>) -> Result<QmiSolution> {
    let terms = QmiTerms::new(sys, gamma)?;
    let eps = eps.unwrap_or_else(|| terms.default_eps());
    if !(eps > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "regularization must be positive, got {eps}"
        )));
    }
    let dim = terms.f.nrows();
    let tol = 1e-10 * (1.0 + lambda_max(&terms.q).max(0.0));
    let q_reg = &terms.q + eye(dim) * real(eps);
    let base = riccati::solve_care_newton(&terms.f, &terms.g, &q_reg, tol)?;
    let pa = base.p;
    let norm = pa.norm();
    let mirrored = terms.sigma_conj(&pa);
    let averaged = hermitian_part(&((&pa + &mirrored) * real(0.5)));

    let mut tried = Vec::new();
    if block_defect(&pa, &terms.sigma) <= 1e-8 * norm {
        if let Some(worst) = accept(&terms, &averaged) {
            return Ok(QmiSolution {
                p: averaged,
                lhs_max_eig: worst,
                route: BlockRoute::Direct,
                newton_steps: base.steps,
                eps,
            });
        }
    }
    if let Some(worst) = accept(&terms, &averaged) {
        return Ok(QmiSolution {
            p: averaged,
            lhs_max_eig: worst,
            route: BlockRoute::Symmetrized,
            newton_steps: base.steps,
            eps,
        });
    }
    tried.push(format!(
        "symmetrized max eig {:.3e}",
        lambda_max(&terms.lhs(&averaged))
    ));

    let g_sym = &terms.g + terms.sigma_conj(&terms.g);
    let q_sym = &terms.q + terms.sigma_conj(&terms.q) + eye(dim) * real(eps);
    match riccati::solve_care_newton(&terms.f, &g_sym, &q_sym, tol) {
        Ok(dom) => {
            let p = hermitian_part(&((&dom.p + terms.sigma_conj(&dom.p)) * real(0.5)));
            if let Some(worst) = accept(&terms, &p) {
                return Ok(QmiSolution {
                    p,
                    lhs_max_eig: worst,
                    route: BlockRoute::Dominated,
                    newton_steps: base.steps + dom.steps,
                    eps,
                });
            }
            tried.push(format!(
                "dominated max eig {:.3e}",
                lambda_max(&terms.lhs(&p))
            ));
        }
        Err(e) => tried.push(format!("dominated: {e}")),
    }

    if let Some((scale, worst)) = best_scale(&terms, &averaged) {
        if worst < 0.0 {
            return Ok(QmiSolution {
                p: &averaged * real(scale),
                lhs_max_eig: worst,
                route: BlockRoute::ScaledSymmetrized,
                newton_steps: base.steps,
                eps,
            });
        }
        tried.push(format!(
            "best scaled max eig {worst:.3e} at scale {scale:.3e}"
        ));
    }
    if let Some((p, worst)) = lmi::search_block_form(&terms.f, &terms.b, &terms.q, &averaged) {
        return Ok(QmiSolution {
            p,
            lhs_max_eig: worst,
            route: BlockRoute::ConvexSearch,
            newton_steps: base.steps,
            eps,
        });
    }
    tried.push("convex search stalled".into());
    Err(Error::QmiInfeasible(format!(
        "no block-form solution found ({})",
        tried.join("; ")
    )))
}

/// Minimizes `λmax(LHS(tP))` over `t > 0`: log grid, then golden section.
fn best_scale(terms: &QmiTerms, p: &CMat) -> Option<(f64, f64)> {
    if hermitian_eigenvalues(p).first().is_none_or(|&v| v <= 0.0) {
        return None;
    }
    let score = |log_t: f64| lambda_max(&terms.lhs(&(p * real(log_t.exp()))));
    let grid: Vec<f64> = (0..=120)
        .map(|k| (-6.0 + 0.1 * k as f64) * std::f64::consts::LN_10)
        .collect();
    let (mut best_i, mut best) = (0, f64::INFINITY);
    for (i, &lt) in grid.iter().enumerate() {
        let s = score(lt);
        if s < best {
            best = s;
            best_i = i;
        }
    }
    let (mut a, mut b) = (
        grid[best_i.saturating_sub(1)],
        grid[(best_i + 1).min(grid.len() - 1)],
    );
    let ratio = (5f64.sqrt() - 1.0) / 2.0;
    for _ in 0..80 {
        let x1 = b - ratio * (b - a);
        let x2 = a + ratio * (b - a);
        if score(x1) < score(x2) {
            b = x2;
        } else {
            a = x1;
        }
    }
    let lt = 0.5 * (a + b);
    let s = score(lt);
    if s < best {
        Some((lt.exp(), s))
    } else {
        Some((grid[best_i].exp(), best))
    }
}

/// Double commutators `μᵢ = [zᵢ, [zᵢ, V]] = -2 Ẽᵢ J P J Σ Ẽᵢᵀ` for
/// `V = x†Px`, `x = [a; a#]` and block-form `P`.
pub fn mu_constants(p: &CMat, e_tilde: &CMat) -> Vec<C64> {
    let n = p.nrows() / 2;
    let s = StructureMatrices::new(n);
    let core = &s.j * p * &s.j * &s.sigma;
    (0..e_tilde.nrows())
        .map(|i| {
            let row = e_tilde.rows(i, 1);
            (row * &core * row.transpose())[(0, 0)] * real(-2.0)
        })
        .collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CertificateConstants {
    pub lambda_tilde: f64,
    pub lambda: f64,
    pub c: f64,
    pub c1: f64,
    pub c2: f64,
    pub c3: f64,
}

/// `λ̃ = tr(P J N† diag(I, 0) N J)`.
pub fn lambda_tilde(p: &CMat, n: &CMat) -> f64 {
    let m = n.nrows() / 2;
    let s = StructureMatrices::new(p.nrows() / 2);
    let proj = block_diag2(&eye(m), &zeros(m, m));
    (p * &s.j * n.adjoint() * proj * n * &s.j).trace().re
}

/// Largest `c` with `LHS + cP ⪯ 0`, via `P = L L†`.
pub fn decay_rate(lhs: &CMat, p: &CMat) -> Result<f64> {
    let chol = nalgebra::Cholesky::new(hermitian_part(p))
        .ok_or_else(|| Error::NotPositiveDefinite(crate::linalg::lambda_min(p)))?;
    let l_inv = inverse(&chol.l())
        .ok_or_else(|| Error::NotPositiveDefinite(crate::linalg::lambda_min(p)))?;
    let scaled = -(&l_inv * lhs * l_inv.adjoint());
    Ok(crate::linalg::lambda_min(&scaled))
}

pub fn certificate_constants(
    sys: &LinearQuantumSystem,
    bounds: &SectorBounds,
    p: &CMat,
    lhs: &CMat,
    mu: &[C64],
) -> Result<CertificateConstants> {
    let eigs = hermitian_eigenvalues(p);
    let (pmin, pmax) = (eigs[0], eigs[eigs.len() - 1]);
    if pmin <= 0.0 {
        return Err(Error::NotPositiveDefinite(pmin));
    }
    let lt = lambda_tilde(p, &sys.doubled().n);
    let lambda =
        lt + bounds.delta1 + mu.iter().map(|m| m.norm_sqr()).sum::<f64>() / 4.0 + bounds.delta2;
    let c = decay_rate(lhs, p)?;
    if c <= 0.0 {
        return Err(Error::QmiInfeasible(format!(
            "decay rate {c:.3e} is not positive"
        )));
    }
    Ok(CertificateConstants {
        lambda_tilde: lt,
        lambda,
        c,
        c1: pmax / pmin,
        c2: c,
        c3: lambda / (c * pmin),
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Verdict {
    Certified,
    FailedHurwitz,
    FailedSmallGain,
}

impl Verdict {
    pub fn as_str(self) -> &'static str {
        match self {
            Verdict::Certified => "Certified",
            Verdict::FailedHurwitz => "FailedHurwitz",
            Verdict::FailedSmallGain => "FailedSmallGain",
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct CertifyOptions {
    /// Riccati regularization; defaults to `1e-6 (1 + ‖C†C‖)`.
    pub eps: Option<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct StabilityCertificate {
    pub verdict: Verdict,
    pub bounds: SectorBounds,
    pub f: CMat,
    pub abscissa: f64,
    pub hinf_primary: Option<f64>,
    pub hinf_reduced: Option<f64>,
    pub p: Option<CMat>,
    pub qmi_max_eig: Option<f64>,
    pub route: Option<BlockRoute>,
    pub eps: Option<f64>,
    pub mu: Vec<C64>,
    pub constants: Option<CertificateConstants>,
    /// Sublevel of `x†Px` inside the admissible region (OPA only).
    pub invariant_level: Option<f64>,
}

/// Runs the whole pipeline; Hurwitz and small-gain failures short-circuit
/// into the verdict with whatever was computed so far.
pub fn certify(sys: &LinearQuantumSystem, bounds: &SectorBounds) -> Result<StabilityCertificate> {
    certify_with(sys, bounds, CertifyOptions::default())
}

pub fn certify_with(
    sys: &LinearQuantumSystem,
    bounds: &SectorBounds,
    opts: CertifyOptions,
) -> Result<StabilityCertificate> {
    sys.check_dimensions().map_err(|e| e.at("validate"))?;
    bounds.check().map_err(|e| e.at("validate"))?;
    let d = sys.doubled();
    let f = build_f(&d.m, &d.n).map_err(|e| e.at("build_F"))?;
    let hw = is_hurwitz(&f, HURWITZ_TOL).map_err(|e| e.at("is_hurwitz"))?;
    let mut cert = StabilityCertificate {
        verdict: Verdict::FailedHurwitz,
        bounds: *bounds,
        f,
        abscissa: hw.abscissa,
        hinf_primary: None,
        hinf_reduced: None,
        p: None,
        qmi_max_eig: None,
        route: None,
        eps: None,
        mu: Vec::new(),
        constants: None,
        invariant_level: None,
    };
    if !hw.hurwitz {
        return Ok(cert);
    }
    let hc = hinf_condition(sys, bounds.gamma).map_err(|e| e.at("hinf_condition"))?;
    cert.hinf_primary = Some(hc.primary);
    cert.hinf_reduced = Some(hc.reduced);
    if !hc.pass {
        cert.verdict = Verdict::FailedSmallGain;
        return Ok(cert);
    }
    let sol = solve_qmi(sys, bounds.gamma, opts.eps).map_err(|e| e.at("solve_qmi"))?;
    let terms = QmiTerms::new(sys, bounds.gamma)?;
    let lhs = terms.lhs(&sol.p);
    let mu = mu_constants(&sol.p, &d.e_tilde);
    let constants = certificate_constants(sys, bounds, &sol.p, &lhs, &mu)
        .map_err(|e| e.at("certificate_constants"))?;
    cert.verdict = Verdict::Certified;
    cert.qmi_max_eig = Some(sol.lhs_max_eig);
    cert.route = Some(sol.route);
    cert.eps = Some(sol.eps);
    cert.p = Some(sol.p);
    cert.mu = mu;
    cert.constants = Some(constants);
    Ok(cert)
}

/// `‖P − ΣP^#Σ‖_F`.
pub fn block_form_defect(p: &CMat) -> f64 {
    let s = StructureMatrices::new(p.nrows() / 2);
    block_defect(p, &s.sigma)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::c;
    use crate::linalg::max_abs as max_entry;

    fn diag(v: &[C64]) -> CMat {
        let mut m = zeros(v.len(), v.len());
        for (i, &x) in v.iter().enumerate() {
            m[(i, i)] = x;
        }
        m
    }

    #[test]
    fn opa_f_is_diagonal() {
        let (k1, k2): (f64, f64) = (1.3, 0.4);
        let n = diag(&[
            real(k1.sqrt()),
            real(k2.sqrt()),
            real(k1.sqrt()),
            real(k2.sqrt()),
        ]);
        let f = build_f(&zeros(4, 4), &n).unwrap();
        let want = diag(&[
            real(-k1 / 2.0),
            real(-k2 / 2.0),
            real(-k1 / 2.0),
            real(-k2 / 2.0),
        ]);
        assert!(max_entry(&(f - want)) < 1e-15);
    }

    #[test]
    fn f_vanishes_without_dynamics() {
        assert_eq!(build_f(&zeros(4, 4), &zeros(2, 4)).unwrap(), zeros(4, 4));
    }

    #[test]
    fn single_mode_rotation() {
        let w = 2.5;
        let f = build_f(&diag(&[real(w), real(w)]), &zeros(2, 2)).unwrap();
        assert_eq!(f, diag(&[c(0.0, -w), c(0.0, w)]));
    }

    #[test]
    fn hurwitz_examples() {
        let h = is_hurwitz(&diag(&[real(-0.5); 4]), HURWITZ_TOL).unwrap();
        assert!(h.hurwitz);
        assert!((h.abscissa + 0.5).abs() < 1e-15);
        let h = is_hurwitz(&zeros(3, 3), HURWITZ_TOL).unwrap();
        assert!(!h.hurwitz && h.abscissa == 0.0);
        let h = is_hurwitz(&diag(&[real(-1.0), real(0.01)]), HURWITZ_TOL).unwrap();
        assert!(!h.hurwitz && (h.abscissa - 0.01).abs() < 1e-15);
    }

    #[test]
    fn mu_vanishes_for_zero_rows() {
        let p = eye(4);
        let mut e = zeros(2, 4);
        e[(1, 2)] = real(1.0);
        let mu = mu_constants(&p, &e);
        assert_eq!(mu[0], C64::new(0.0, 0.0));
    }

    #[test]
    fn mu_single_mode_squeezing_term() {
        // z = a, V = p1 (a†a + a a†) + p2 a†² + p2* a²  ⇒  [a, [a, V]] = 2 p2
        let p2 = c(0.3, -0.2);
        let mut p = eye(2);
        p[(0, 1)] = p2;
        p[(1, 0)] = p2.conj();
        let mut e = zeros(1, 2);
        e[(0, 0)] = real(1.0);
        let mu = mu_constants(&p, &e);
        assert!((mu[0] - p2 * 2.0).norm() < 1e-15);
    }

    #[test]
    fn lambda_tilde_vanishes_without_coupling() {
        assert_eq!(lambda_tilde(&eye(4), &zeros(2, 4)), 0.0);
    }
}
