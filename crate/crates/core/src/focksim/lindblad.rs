//! Fixed-step RK4 integration of the master equation
//! `ρ̇ = -i[H, ρ] + Σ_k (L_k ρ L_k† − ½{L_k†L_k, ρ})` on a truncated Fock space.

use serde::{Deserialize, Serialize};

use super::{hamiltonian, TruncatedAlgebra};
use crate::error::{Error, Result};
use crate::linalg::{hermitian_eigenvalues, hermitian_part, real, zeros, CMat, CVec, C64, I};
use crate::model::LinearQuantumSystem;
use crate::opa::{build_opa, OpaParams};
use crate::perturbation::PerturbationSeries;

/// Row-compressed complex matrix; enough for products with dense `ρ`.
#[derive(Clone, Debug)]
struct Sparse {
    rows: Vec<Vec<(usize, C64)>>,
}

impl Sparse {
    fn from_dense(m: &CMat) -> Self {
        let rows = (0..m.nrows())
            .map(|r| {
                (0..m.ncols())
                    .filter_map(|c| {
                        let v = m[(r, c)];
                        (v != C64::new(0.0, 0.0)).then_some((c, v))
                    })
                    .collect()
            })
            .collect();
        Sparse { rows }
    }

    /// `self · d`
    fn mul(&self, d: &CMat) -> CMat {
        let mut out = zeros(self.rows.len(), d.ncols());
        for col in 0..d.ncols() {
            let src = d.column(col);
            let mut dst = out.column_mut(col);
            for (r, row) in self.rows.iter().enumerate() {
                let mut acc = C64::new(0.0, 0.0);
                for &(k, v) in row {
                    acc += v * src[k];
                }
                dst[r] = acc;
            }
        }
        out
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LindbladOptions {
    pub dt: f64,
    pub t_final: f64,
    /// Record every this many steps.
    pub sample_every: usize,
    /// Eigenvalue positivity check every this many samples (0 = final only).
    pub positivity_every: usize,
    pub trace_tol: f64,
    pub negativity_tol: f64,
}

impl LindbladOptions {
    pub fn new(dt: f64, t_final: f64) -> Self {
        LindbladOptions {
            dt,
            t_final,
            sample_every: 10,
            positivity_every: 50,
            trace_tol: 1e-6,
            negativity_tol: 1e-8,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FockTrajectory {
    pub times: Vec<f64>,
    /// `tr(ρ Σ_j (a_j†a_j + a_j a_j†))`
    pub msq: Vec<f64>,
    pub trace: Vec<f64>,
    pub purity: Vec<f64>,
    pub dim: usize,
}

struct Generator {
    /// `-i (H − ½ i Σ L†L)`
    drift: Sparse,
    jumps: Vec<Sparse>,
}

impl Generator {
    fn new(h: &CMat, ls: &[CMat]) -> Self {
        let mut heff = h.clone();
        for l in ls {
            heff -= (l.adjoint() * l) * (I * 0.5);
        }
        Generator {
            drift: Sparse::from_dense(&(heff * (-I))),
            jumps: ls.iter().map(Sparse::from_dense).collect(),
        }
    }

    /// Valid for Hermitian `ρ`: `A + A† + Σ L (L ρ)†` with `A = -i H_eff ρ`.
    fn apply(&self, rho: &CMat) -> CMat {
        let a = self.drift.mul(rho);
        let mut out = &a + a.adjoint();
        for l in &self.jumps {
            let lr = l.mul(rho);
            out += l.mul(&lr.adjoint());
        }
        out
    }
}

fn purity(rho: &CMat) -> f64 {
    rho.iter().map(|z| z.norm_sqr()).sum()
}

fn diag_weights(alg: &TruncatedAlgebra) -> Vec<f64> {
    let ns = alg.number_sum();
    (0..alg.size()).map(|i| ns[(i, i)].re).collect()
}

pub fn lindblad_evolve(
    alg: &TruncatedAlgebra,
    h: &CMat,
    ls: &[CMat],
    rho0: &CMat,
    opts: &LindbladOptions,
) -> Result<FockTrajectory> {
    let size = alg.size();
    if rho0.shape() != (size, size) {
        return Err(Error::Dimension {
            left: "rho0",
            left_shape: rho0.shape(),
            right: "Fock space",
            right_shape: (size, size),
        });
    }
    if !(opts.dt > 0.0 && opts.t_final >= 0.0 && opts.dt.is_finite() && opts.t_final.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "need dt > 0 and t_final >= 0, got dt = {}, t_final = {}",
            opts.dt, opts.t_final
        )));
    }
    let gen = Generator::new(h, ls);
    let weights = diag_weights(alg);
    let steps = (opts.t_final / opts.dt).round() as usize;
    let every = opts.sample_every.max(1);

    let mut traj = FockTrajectory {
        times: Vec::new(),
        msq: Vec::new(),
        trace: Vec::new(),
        purity: Vec::new(),
        dim: alg.dim,
    };
    let mut rho = hermitian_part(rho0);
    let mut samples = 0usize;
    let mut record =
        |rho: &CMat, t: f64, force_psd: bool, traj: &mut FockTrajectory| -> Result<()> {
            let tr = rho.trace().re;
            if (tr - 1.0).abs() > opts.trace_tol {
                return Err(Error::Integration {
                    t,
                    reason: format!("trace drifted to {tr:.9}"),
                });
            }
            if force_psd
                || (opts.positivity_every > 0 && samples.is_multiple_of(opts.positivity_every))
            {
                let lo = hermitian_eigenvalues(rho)[0];
                if lo < -opts.negativity_tol {
                    return Err(Error::Integration {
                        t,
                        reason: format!("density matrix eigenvalue {lo:.3e} below zero"),
                    });
                }
            }
            samples += 1;
            traj.times.push(t);
            traj.msq
                .push((0..size).map(|i| rho[(i, i)].re * weights[i]).sum());
            traj.trace.push(tr);
            traj.purity.push(purity(rho));
            Ok(())
        };
    record(&rho, 0.0, true, &mut traj)?;

    let dt = opts.dt;
    for step in 1..=steps {
        let k1 = gen.apply(&rho);
        let k2 = gen.apply(&(&rho + &k1 * real(0.5 * dt)));
        let k3 = gen.apply(&(&rho + &k2 * real(0.5 * dt)));
        let k4 = gen.apply(&(&rho + &k3 * real(dt)));
        rho += (k1 + (k2 + k3) * real(2.0) + k4) * real(dt / 6.0);
        rho = hermitian_part(&rho);
        let t = step as f64 * dt;
        if rho.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::Integration {
                t,
                reason: "non-finite density matrix".into(),
            });
        }
        if step % every == 0 || step == steps {
            record(&rho, t, step == steps, &mut traj)?;
        }
    }
    Ok(traj)
}

/// Truncated coherent state `⊗_j |α_j⟩`, renormalized.
pub fn coherent_state(alg: &TruncatedAlgebra, alpha: &[C64]) -> Result<CVec> {
    if alpha.len() != alg.modes {
        return Err(Error::InvalidParameter(format!(
            "{} amplitudes for {} modes",
            alpha.len(),
            alg.modes
        )));
    }
    let single: Vec<Vec<C64>> = alpha
        .iter()
        .map(|&a| {
            let mut amp = Vec::with_capacity(alg.dim);
            let mut cur = real(1.0);
            for n in 0..alg.dim {
                if n > 0 {
                    cur = cur * a / (n as f64).sqrt();
                }
                amp.push(cur);
            }
            amp
        })
        .collect();
    let mut psi = CVec::from_fn(alg.size(), |idx, _| {
        alg.occupation(idx)
            .iter()
            .zip(&single)
            .fold(real(1.0), |acc, (&n, amp)| acc * amp[n])
    });
    let norm = psi.norm();
    if norm == 0.0 || !norm.is_finite() {
        return Err(Error::InvalidParameter(
            "coherent state has zero norm".into(),
        ));
    }
    psi /= real(norm);
    Ok(psi)
}

pub fn density_from_state(psi: &CVec) -> CMat {
    psi * psi.adjoint()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundReport {
    pub bound: Vec<f64>,
    /// `min_t (bound − msq)`
    pub worst_slack: f64,
    pub holds: bool,
}

/// Compares `msq(t)` against `c₁ e^{-c₂ t} msq(0) + c₃`, allowing
/// `1e-6 (1 + c₃)` for truncation.
pub fn check_ms_bound(traj: &FockTrajectory, c1: f64, c2: f64, c3: f64) -> BoundReport {
    let m0 = traj.msq.first().copied().unwrap_or(0.0);
    let bound: Vec<f64> = traj
        .times
        .iter()
        .map(|&t| c1 * (-c2 * t).exp() * m0 + c3)
        .collect();
    let worst_slack = bound
        .iter()
        .zip(&traj.msq)
        .map(|(b, m)| b - m)
        .fold(f64::INFINITY, f64::min);
    BoundReport {
        holds: worst_slack + 1e-6 * (1.0 + c3) >= 0.0,
        bound,
        worst_slack,
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SimConfig {
    pub dim: usize,
    pub dt: Option<f64>,
    pub t_final: Option<f64>,
    /// Coherent amplitudes `α_j` of the initial state.
    pub alpha: Vec<C64>,
    pub sample_every: usize,
}

impl SimConfig {
    pub fn new(dim: usize, alpha: Vec<C64>) -> Self {
        SimConfig {
            dim,
            dt: None,
            t_final: None,
            alpha,
            sample_every: 10,
        }
    }
}

/// Master equation for `H = ½x†Mx + f`, `L = N₁a + N₂a#`.
pub fn simulate_system(
    sys: &LinearQuantumSystem,
    f: &PerturbationSeries,
    cfg: &SimConfig,
    dt: f64,
    t_final: f64,
) -> Result<FockTrajectory> {
    let alg = super::build_algebra(sys.n, cfg.dim)?;
    let h = hamiltonian(&alg, sys, f)?;
    let ls = alg.couplings(sys);
    let rho0 = density_from_state(&coherent_state(&alg, &cfg.alpha)?);
    let mut opts = LindbladOptions::new(dt, t_final);
    opts.sample_every = cfg.sample_every;
    lindblad_evolve(&alg, &h, &ls, &rho0, &opts)
}

/// OPA master equation with the default step `1e-3 / max(κ₁, κ₂, χ·dim)` and
/// horizon `10 / min(κ₁, κ₂)` unless overridden.
pub fn simulate_opa(params: &OpaParams, cfg: &SimConfig) -> Result<FockTrajectory> {
    params.check()?;
    let (sys, f) = build_opa(params)?;
    let rate = params
        .kappa1
        .max(params.kappa2)
        .max(params.chi * cfg.dim as f64);
    let dt = cfg.dt.unwrap_or(1e-3 / rate);
    let t_final = cfg
        .t_final
        .unwrap_or(10.0 / params.kappa1.min(params.kappa2));
    simulate_system(&sys, &f, cfg, dt, t_final)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::focksim::build_algebra;
    use crate::linalg::c;

    #[test]
    fn coherent_state_statistics() {
        let alg = build_algebra(1, 25).unwrap();
        let alpha = c(0.6, -0.8);
        let psi = coherent_state(&alg, &[alpha]).unwrap();
        assert!((psi.norm() - 1.0).abs() < 1e-14);
        let mean = (psi.adjoint() * &alg.a[0] * &psi)[(0, 0)];
        assert!((mean - alpha).norm() < 1e-10);
    }

    #[test]
    fn unitary_evolution_preserves_purity() {
        let alg = build_algebra(2, 5).unwrap();
        let (a1, a2) = (&alg.a[0], &alg.a[1]);
        let h = (a2.adjoint() * a1 * a1 - a1.adjoint() * a1.adjoint() * a2) * c(0.0, 0.3);
        let rho0 = density_from_state(&coherent_state(&alg, &[c(0.5, 0.0), c(0.0, 0.3)]).unwrap());
        let mut opts = LindbladOptions::new(1e-3, 2.0);
        opts.sample_every = 100;
        let traj = lindblad_evolve(&alg, &h, &[], &rho0, &opts).unwrap();
        for p in &traj.purity {
            assert!((p - 1.0).abs() < 1e-8, "{p}");
        }
    }

    #[test]
    fn damped_cavity_decays_to_vacuum() {
        // Single mode, L = √κ a: ⟨a†a⟩ = n₀ e^{-κt}, so msq = 2n₀ e^{-κt} + 1.
        let alg = build_algebra(1, 16).unwrap();
        let kappa: f64 = 1.0;
        let l = &alg.a[0] * real(kappa.sqrt());
        let alpha = c(1.0, 0.0);
        let rho0 = density_from_state(&coherent_state(&alg, &[alpha]).unwrap());
        let mut opts = LindbladOptions::new(1e-3, 3.0);
        opts.sample_every = 500;
        let traj = lindblad_evolve(&alg, &zeros(16, 16), &[l], &rho0, &opts).unwrap();
        let n0 = (traj.msq[0] - 1.0) / 2.0;
        for (t, m) in traj.times.iter().zip(&traj.msq) {
            let want = 2.0 * n0 * (-kappa * t).exp() + 1.0;
            assert!((m - want).abs() < 1e-8, "t = {t}: {m} vs {want}");
        }
    }

    #[test]
    fn bound_report_slack() {
        let traj = FockTrajectory {
            times: vec![0.0, 1.0],
            msq: vec![2.0, 1.5],
            trace: vec![1.0, 1.0],
            purity: vec![1.0, 1.0],
            dim: 3,
        };
        let r = check_ms_bound(&traj, 1.0, 0.0, 0.0);
        assert!(r.holds);
        assert_eq!(r.worst_slack, 0.0);
        let r = check_ms_bound(&traj, 0.5, 0.0, 0.0);
        assert!(!r.holds && r.worst_slack < 0.0);
    }
}
