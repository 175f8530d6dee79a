//! Degenerate optical parametric amplifier: fundamental mode `a₁`,
//! second-harmonic mode `a₂`, `H = iχ(a₂* a₁² − (a₁*)² a₂)` and
//! `L = [√κ₁ a₁; √κ₂ a₂]`, with the perturbation channels `z = [a₁*; a₂*]`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{c, eye, real, zeros, CMat, C64, I};
use crate::model::LinearQuantumSystem;
use crate::perturbation::{PerturbationSeries, SectorBounds};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct OpaParams {
    pub kappa1: f64,
    pub kappa2: f64,
    pub chi: f64,
}

impl OpaParams {
    pub fn new(kappa1: f64, kappa2: f64, chi: f64) -> Result<Self> {
        let p = OpaParams {
            kappa1,
            kappa2,
            chi,
        };
        p.check()?;
        Ok(p)
    }

    pub fn check(&self) -> Result<()> {
        for (name, v) in [
            ("kappa1", self.kappa1),
            ("kappa2", self.kappa2),
            ("chi", self.chi),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::InvalidParameter(format!(
                    "{name} must be positive, got {v}"
                )));
            }
        }
        Ok(())
    }
}

/// The OPA as a linear system plus its cubic perturbation series.
pub fn build_opa(params: &OpaParams) -> Result<(LinearQuantumSystem, PerturbationSeries)> {
    params.check()?;
    let mut n1 = zeros(2, 2);
    n1[(0, 0)] = real(params.kappa1.sqrt());
    n1[(1, 1)] = real(params.kappa2.sqrt());
    let sys = LinearQuantumSystem::new(
        zeros(2, 2),
        zeros(2, 2),
        n1,
        zeros(2, 2),
        zeros(2, 2),
        eye(2),
    )?;
    let series = PerturbationSeries::new(2)
        .with_term(1, 0, 1, 2, I * params.chi)?
        .with_term(0, 1, 2, 1, -I * params.chi)?;
    Ok((sys, series))
}

/// `max(2/κ₁, 2/κ₂)`.
pub fn closed_form_hinf(params: &OpaParams) -> f64 {
    (2.0 / params.kappa1).max(2.0 / params.kappa2)
}

/// Strict small-gain test `max(2/κ₁, 2/κ₂) < γ/2`.
pub fn gamma_condition(params: &OpaParams, gamma: f64) -> bool {
    closed_form_hinf(params) < gamma / 2.0
}

/// `|z₁|²` below which the first sector condition holds for every `|z₂|²`.
pub fn knee(chi: f64, gamma: f64) -> f64 {
    1.0 / (4.0 * gamma * gamma * chi * chi)
}

/// Ceiling `δ₂ / (4χ²)` from the second sector condition.
pub fn z2_ceiling(chi: f64, bounds: &SectorBounds) -> f64 {
    bounds.delta2 / (4.0 * chi * chi)
}

/// Bound on `|z₂|²` from the first sector condition alone; `+∞` at or below
/// the knee, possibly negative past the right endpoint.
pub fn first_condition_cap(chi: f64, bounds: &SectorBounds, z1sq: f64) -> f64 {
    let g2c2 = bounds.gamma * bounds.gamma * chi * chi;
    if z1sq <= knee(chi, bounds.gamma) {
        return f64::INFINITY;
    }
    (bounds.delta1 / (chi * chi) + z1sq / g2c2 - z1sq * z1sq) / (4.0 * z1sq - 1.0 / g2c2)
}

/// Which constraint sets the cap on `|z₂|²`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ActiveConstraint {
    /// First sector condition (the rational bound past the knee).
    D2,
    /// Second sector condition (the `δ₂/(4χ²)` ceiling).
    D3,
}

impl ActiveConstraint {
    pub fn label(self) -> &'static str {
        match self {
            ActiveConstraint::D2 => "d2",
            ActiveConstraint::D3 => "d3",
        }
    }
}

/// Largest admissible `|z₂|²` at the given `|z₁|²`.
pub fn region_z2_cap(params: &OpaParams, bounds: &SectorBounds, z1sq: f64) -> f64 {
    region_z2_cap_with(params, bounds, z1sq).0
}

pub fn region_z2_cap_with(
    params: &OpaParams,
    bounds: &SectorBounds,
    z1sq: f64,
) -> (f64, ActiveConstraint) {
    let ceiling = z2_ceiling(params.chi, bounds);
    let first = first_condition_cap(params.chi, bounds, z1sq);
    if first < ceiling {
        (first.max(0.0), ActiveConstraint::D2)
    } else {
        (ceiling, ActiveConstraint::D3)
    }
}

/// Right endpoint of the region in `|z₁|²`, reported two ways.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LambdaBar {
    /// `1/(2γ²χ²) + √(1/(4γ⁴χ⁴) + δ₁)` as printed in the figure caption.
    pub caption: f64,
    /// Root of `δ₁/χ² + λ/(γ²χ²) − λ² = 0`: `1/(2γ²χ²) + √(1/(4γ⁴χ⁴) + δ₁/χ²)`.
    pub numerator_root: f64,
}

impl LambdaBar {
    pub fn discrepancy(&self) -> f64 {
        self.numerator_root - self.caption
    }
}

pub fn lambda_bar(params: &OpaParams, bounds: &SectorBounds) -> LambdaBar {
    let g2c2 = bounds.gamma * bounds.gamma * params.chi * params.chi;
    let half = 1.0 / (2.0 * g2c2);
    let quarter = 1.0 / (4.0 * g2c2 * g2c2);
    LambdaBar {
        caption: half + (quarter + bounds.delta1).sqrt(),
        numerator_root: half + (quarter + bounds.delta1 / (params.chi * params.chi)).sqrt(),
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct RegionSample {
    pub z1sq: f64,
    pub z2sq_max: f64,
    pub active: ActiveConstraint,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RegionCurve {
    pub samples: Vec<RegionSample>,
    pub lambda_bar: f64,
    pub cap2: f64,
    pub params: OpaParams,
    pub bounds: SectorBounds,
}

impl RegionCurve {
    /// Cap on `|z₂|²` at arbitrary `|z₁|²`; negative outside `[0, λ̄]`.
    pub fn cap_at(&self, z1sq: f64) -> f64 {
        if z1sq < 0.0 || z1sq > self.lambda_bar {
            return -1.0;
        }
        region_z2_cap(&self.params, &self.bounds, z1sq)
    }

    pub fn contains(&self, z1sq: f64, z2sq: f64) -> bool {
        z1sq >= 0.0 && z1sq <= self.lambda_bar && z2sq <= self.cap_at(z1sq)
    }

    /// Zero-area region: the `|z₂|²` ceiling or the `|z₁|²` extent vanishes.
    pub fn is_degenerate(&self) -> bool {
        self.cap2 <= 0.0 || self.lambda_bar <= 0.0
    }
}

/// Samples the cap on a uniform grid of `|z₁|²` over `[0, λ̄]` (numerator root).
pub fn region_curve(
    params: &OpaParams,
    bounds: &SectorBounds,
    n_samples: usize,
) -> Result<RegionCurve> {
    params.check()?;
    bounds.check()?;
    if n_samples < 2 {
        return Err(Error::InvalidParameter(format!(
            "region curve needs at least 2 samples, got {n_samples}"
        )));
    }
    let lb = lambda_bar(params, bounds).numerator_root;
    let samples = (0..n_samples)
        .map(|k| {
            let z1sq = if k + 1 == n_samples {
                lb
            } else {
                lb * k as f64 / (n_samples - 1) as f64
            };
            let (z2sq_max, active) = region_z2_cap_with(params, bounds, z1sq);
            RegionSample {
                z1sq,
                z2sq_max,
                active,
            }
        })
        .collect();
    Ok(RegionCurve {
        samples,
        lambda_bar: lb,
        cap2: z2_ceiling(params.chi, bounds),
        params: *params,
        bounds: *bounds,
    })
}

/// Rational bound with `γ = 4/κ₁` substituted.
pub fn closed_form_gamma_substituted(params: &OpaParams, delta1: f64, z1sq: f64) -> f64 {
    let (k1, chi) = (params.kappa1, params.chi);
    (delta1 / (chi * chi) + z1sq * k1 * k1 / (16.0 * chi * chi) - z1sq * z1sq)
        / (4.0 * z1sq - k1 * k1 / (16.0 * chi * chi))
}

/// Number of `|z₁|:|z₂|` split angles sampled on the ellipsoid boundary.
pub const ELLIPSOID_ANGLES: usize = 64;
/// Phases per channel sampled on the ellipsoid boundary.
pub const ELLIPSOID_PHASES: usize = 8;

/// Doubled semiclassical coordinates `x = (z₁*, z₂*, z₁, z₂)`.
pub fn doubled_coordinates(z: [C64; 2]) -> [C64; 4] {
    [z[0].conj(), z[1].conj(), z[0], z[1]]
}

fn quad_form(p: &CMat, x: &[C64; 4]) -> f64 {
    let mut acc = C64::new(0.0, 0.0);
    for i in 0..4 {
        for j in 0..4 {
            acc += x[i].conj() * p[(i, j)] * x[j];
        }
    }
    acc.re
}

/// Largest `ρ` with `{x†Px ≤ ρ}` inside the region, by bisection on `ρ`
/// against sampled boundary points (`ELLIPSOID_ANGLES × ELLIPSOID_PHASES²`
/// directions).
pub fn invariant_ellipsoid(p: &CMat, region: &RegionCurve) -> Result<f64> {
    if p.shape() != (4, 4) {
        return Err(Error::Dimension {
            left: "P",
            left_shape: p.shape(),
            right: "OPA",
            right_shape: (4, 4),
        });
    }
    if crate::linalg::lambda_min(p) <= 0.0 {
        return Err(Error::NotPositiveDefinite(crate::linalg::lambda_min(p)));
    }
    if region.is_degenerate() {
        return Ok(0.0);
    }
    // unit directions (|z1|, |z2|) = (cos θ, sin θ) with sampled phases
    let mut dirs: Vec<([C64; 2], f64)> = Vec::new();
    for a in 0..=ELLIPSOID_ANGLES {
        let theta = std::f64::consts::FRAC_PI_2 * a as f64 / ELLIPSOID_ANGLES as f64;
        for k1 in 0..ELLIPSOID_PHASES {
            for k2 in 0..ELLIPSOID_PHASES {
                let ph = |k: usize| 2.0 * std::f64::consts::PI * k as f64 / ELLIPSOID_PHASES as f64;
                let z = [
                    C64::from_polar(theta.cos(), ph(k1)),
                    C64::from_polar(theta.sin(), ph(k2)),
                ];
                let q = quad_form(p, &doubled_coordinates(z));
                dirs.push((z, q));
            }
        }
    }
    let inside = |rho: f64| {
        dirs.iter().all(|(z, q)| {
            let t2 = rho / q;
            region.contains(t2 * z[0].norm_sqr(), t2 * z[1].norm_sqr())
        })
    };
    let mut lo = 0.0;
    let mut hi = dirs.iter().map(|d| d.1).fold(0.0, f64::max)
        * (region.lambda_bar + region.cap2).max(1e-300);
    let mut guard = 0;
    while inside(hi) {
        lo = hi;
        hi *= 2.0;
        guard += 1;
        if guard > 200 {
            return Err(Error::InvalidParameter("region appears unbounded".into()));
        }
    }
    for _ in 0..200 {
        if hi - lo <= 1e-12 * hi {
            break;
        }
        let mid = 0.5 * (lo + hi);
        if inside(mid) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(lo)
}

/// Coherent amplitudes `(α₁, α₂)` realizing `|z₁|², |z₂|²` with real phases;
/// `zᵢ = αᵢ*`.
pub fn amplitudes_for(z1sq: f64, z2sq: f64) -> [C64; 2] {
    [c(z1sq.sqrt(), 0.0), c(z2sq.sqrt(), 0.0)]
}
