//! Perturbation Hamiltonian `f(z, z*)` as a finite sum of monomials
//! `S_{ijkl} z_i^k (z_j^*)^l`, its formal derivatives and semiclassical
//! sector-bound checks.
//!
//! Channel indices are 0-based in this API; the JSON format is 1-based.

use std::collections::{BTreeMap, BTreeSet};
use std::ops::{Add, Mul};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::C64;

/// Highest total degree `k + l` a stored monomial may have.
pub const MAX_DEGREE: u32 = 16;

/// Key `(i, j, k, l)` of the monomial `z_i^k (z_j^*)^l`.
pub type TermKey = (usize, usize, u32, u32);

#[derive(Clone, Debug, PartialEq, Default)]
pub struct PerturbationSeries {
    p: usize,
    coeffs: BTreeMap<TermKey, C64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SelfAdjointViolation {
    pub key: TermKey,
    pub residual: f64,
}

impl PerturbationSeries {
    pub fn new(p: usize) -> Self {
        PerturbationSeries {
            p,
            coeffs: BTreeMap::new(),
        }
    }

    pub fn channels(&self) -> usize {
        self.p
    }

    pub fn is_empty(&self) -> bool {
        self.coeffs.is_empty()
    }

    pub fn terms(&self) -> impl Iterator<Item = (TermKey, C64)> + '_ {
        self.coeffs.iter().map(|(k, v)| (*k, *v))
    }

    pub fn coeff(&self, key: TermKey) -> C64 {
        self.coeffs.get(&key).copied().unwrap_or_default()
    }

    /// Adds `value` to the coefficient of `z_i^k (z_j^*)^l`, merging like terms.
    pub fn add_term(&mut self, i: usize, j: usize, k: u32, l: u32, value: C64) -> Result<()> {
        for idx in [i, j] {
            if idx >= self.p {
                return Err(Error::IndexOutOfRange {
                    index: idx + 1,
                    max: self.p,
                });
            }
        }
        if k + l > MAX_DEGREE {
            return Err(Error::InvalidParameter(format!(
                "monomial degree {} exceeds cap {MAX_DEGREE}",
                k + l
            )));
        }
        let slot = self.coeffs.entry((i, j, k, l)).or_default();
        *slot += value;
        if *slot == C64::new(0.0, 0.0) {
            self.coeffs.remove(&(i, j, k, l));
        }
        Ok(())
    }

    pub fn with_term(mut self, i: usize, j: usize, k: u32, l: u32, value: C64) -> Result<Self> {
        self.add_term(i, j, k, l, value)?;
        Ok(self)
    }

    /// Highest total degree over stored terms.
    pub fn degree(&self) -> u32 {
        self.coeffs
            .keys()
            .map(|&(_, _, k, l)| k + l)
            .max()
            .unwrap_or(0)
    }

    /// Pairs violating `S_{ijkl} = conj(S_{jilk})`, one entry per pair.
    pub fn validate_selfadjoint(&self) -> Vec<SelfAdjointViolation> {
        let mut seen = BTreeSet::new();
        let mut out = Vec::new();
        for &key in self.coeffs.keys() {
            let (i, j, k, l) = key;
            let partner = (j, i, l, k);
            let canon = key.min(partner);
            if !seen.insert(canon) {
                continue;
            }
            let residual = (self.coeff(canon) - self.coeff(key.max(partner)).conj()).norm();
            let scale = self.coeff(key).norm().max(self.coeff(partner).norm());
            if residual > 1e-12 * (1.0 + scale) {
                out.push(SelfAdjointViolation {
                    key: canon,
                    residual,
                });
            }
        }
        out
    }

    fn check_channel(&self, i: usize) -> Result<()> {
        if i >= self.p {
            return Err(Error::IndexOutOfRange {
                index: i + 1,
                max: self.p,
            });
        }
        Ok(())
    }

    /// Formal `∂f/∂z_i`: `k S_{ijkl}` on `z_i^{k-1} (z_j^*)^l`.
    pub fn partial_z(&self, i: usize) -> Result<Self> {
        self.check_channel(i)?;
        let mut out = PerturbationSeries::new(self.p);
        for (&(ti, j, k, l), &s) in &self.coeffs {
            if ti == i && k >= 1 {
                out.add_term(i, j, k - 1, l, s * k as f64)?;
            }
        }
        Ok(out)
    }

    /// Formal `∂²f/∂z_i²`: `k(k-1) S_{ijkl}` on `z_i^{k-2} (z_j^*)^l`.
    pub fn second_partial_z(&self, i: usize) -> Result<Self> {
        self.check_channel(i)?;
        let mut out = PerturbationSeries::new(self.p);
        for (&(ti, j, k, l), &s) in &self.coeffs {
            if ti == i && k >= 2 {
                out.add_term(i, j, k - 2, l, s * (k * (k - 1)) as f64)?;
            }
        }
        Ok(out)
    }

    /// Semiclassical value with `z` treated as complex numbers.
    pub fn eval(&self, z: &[C64]) -> C64 {
        self.coeffs
            .iter()
            .map(|(&(i, j, k, l), &s)| s * z[i].powu(k) * z[j].conj().powu(l))
            .sum()
    }
}

impl Add for &PerturbationSeries {
    type Output = PerturbationSeries;

    fn add(self, rhs: &PerturbationSeries) -> PerturbationSeries {
        let mut out = self.clone();
        out.p = out.p.max(rhs.p);
        for (&key, &v) in &rhs.coeffs {
            let slot = out.coeffs.entry(key).or_default();
            *slot += v;
            if *slot == C64::new(0.0, 0.0) {
                out.coeffs.remove(&key);
            }
        }
        out
    }
}

impl Mul<C64> for &PerturbationSeries {
    type Output = PerturbationSeries;

    fn mul(self, rhs: C64) -> PerturbationSeries {
        let mut out = PerturbationSeries::new(self.p);
        if rhs != C64::new(0.0, 0.0) {
            out.coeffs = self.coeffs.iter().map(|(&k, &v)| (k, v * rhs)).collect();
        }
        out
    }
}

/// Constants `γ > 0`, `δ₁ ≥ 0`, `δ₂ ≥ 0` of the sector conditions.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SectorBounds {
    pub gamma: f64,
    pub delta1: f64,
    pub delta2: f64,
}

impl SectorBounds {
    pub fn new(gamma: f64, delta1: f64, delta2: f64) -> Result<Self> {
        let b = SectorBounds {
            gamma,
            delta1,
            delta2,
        };
        b.check()?;
        Ok(b)
    }

    pub fn check(&self) -> Result<()> {
        if !(self.gamma > 0.0 && self.gamma.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "gamma must be positive, got {}",
                self.gamma
            )));
        }
        if !(self.delta1 >= 0.0 && self.delta2 >= 0.0) {
            return Err(Error::InvalidParameter(
                "delta1 and delta2 must be nonnegative".into(),
            ));
        }
        Ok(())
    }
}

/// First and second derivative series for every channel, computed once.
#[derive(Clone, Debug)]
pub struct Derivatives {
    pub first: Vec<PerturbationSeries>,
    pub second: Vec<PerturbationSeries>,
}

impl Derivatives {
    pub fn of(f: &PerturbationSeries) -> Self {
        let p = f.channels();
        Derivatives {
            first: (0..p).map(|i| f.partial_z(i).expect("in range")).collect(),
            second: (0..p)
                .map(|i| f.second_partial_z(i).expect("in range"))
                .collect(),
        }
    }

    /// `(margin1, margin2)`; both nonnegative iff `z` satisfies the sector bounds.
    pub fn margins(&self, bounds: &SectorBounds, z: &[C64]) -> (f64, f64) {
        let zsq: f64 = z.iter().map(|v| v.norm_sqr()).sum();
        let d1: f64 = self.first.iter().map(|g| g.eval(z).norm_sqr()).sum();
        let d2: f64 = self.second.iter().map(|g| g.eval(z).norm_sqr()).sum();
        (
            zsq / (bounds.gamma * bounds.gamma) + bounds.delta1 - d1,
            bounds.delta2 - d2,
        )
    }
}

pub fn sector_margins(f: &PerturbationSeries, bounds: &SectorBounds, z: &[C64]) -> (f64, f64) {
    Derivatives::of(f).margins(bounds, z)
}

/// Phases sampled per channel in [`scan_sector_region`].
pub const PHASES_PER_CHANNEL: usize = 8;

/// Grid over squared magnitudes `|z_i|²`, one axis per channel (at most two).
#[derive(Clone, Debug, PartialEq)]
pub struct MagnitudeGrid {
    pub axes: Vec<Vec<f64>>,
}

impl MagnitudeGrid {
    /// Uniform nodes `0, Δ, …, max` with `points` nodes per axis.
    pub fn uniform(maxima: &[f64], points: usize) -> Self {
        MagnitudeGrid {
            axes: maxima
                .iter()
                .map(|&m| {
                    if points == 1 {
                        vec![0.0]
                    } else {
                        (0..points)
                            .map(|k| m * k as f64 / (points - 1) as f64)
                            .collect()
                    }
                })
                .collect(),
        }
    }

    pub fn cells(&self) -> usize {
        if self.axes.is_empty() {
            0
        } else {
            self.axes.iter().map(Vec::len).product()
        }
    }

    fn point(&self, flat: usize) -> Vec<f64> {
        let mut rem = flat;
        let mut out = vec![0.0; self.axes.len()];
        for (d, axis) in self.axes.iter().enumerate().rev() {
            out[d] = axis[rem % axis.len()];
            rem /= axis.len();
        }
        out
    }
}

/// Per-cell admissibility with worst-case margins over sampled phases.
/// Cells are flattened row-major (last axis fastest).
#[derive(Clone, Debug, PartialEq)]
pub struct RegionMask {
    pub grid: MagnitudeGrid,
    pub admissible: Vec<bool>,
    pub margin1: Vec<f64>,
    pub margin2: Vec<f64>,
}

impl RegionMask {
    pub fn index(&self, idx: &[usize]) -> usize {
        idx.iter()
            .zip(&self.grid.axes)
            .fold(0, |acc, (&i, axis)| acc * axis.len() + i)
    }

    pub fn get(&self, idx: &[usize]) -> bool {
        self.admissible[self.index(idx)]
    }

    pub fn point(&self, flat: usize) -> Vec<f64> {
        self.grid.point(flat)
    }
}

pub fn scan_sector_region(
    f: &PerturbationSeries,
    bounds: &SectorBounds,
    grid: &MagnitudeGrid,
) -> Result<RegionMask> {
    let p = grid.axes.len();
    if grid.cells() == 0 {
        return Err(Error::InvalidParameter("sector grid has zero cells".into()));
    }
    if p > 2 {
        return Err(Error::InvalidParameter(format!(
            "exhaustive phase sampling supports at most 2 channels, got {p}"
        )));
    }
    if p != f.channels() {
        return Err(Error::InvalidParameter(format!(
            "grid has {p} axes but the series has {} channels",
            f.channels()
        )));
    }
    let deriv = Derivatives::of(f);
    let combos = PHASES_PER_CHANNEL.pow(p as u32);
    let cells: Vec<(f64, f64)> = (0..grid.cells())
        .into_par_iter()
        .map(|flat| {
            let mags = grid.point(flat);
            let mut worst = (f64::INFINITY, f64::INFINITY);
            for combo in 0..combos {
                let mut rem = combo;
                let z: Vec<C64> = mags
                    .iter()
                    .map(|&m| {
                        let k = rem % PHASES_PER_CHANNEL;
                        rem /= PHASES_PER_CHANNEL;
                        let phase =
                            2.0 * std::f64::consts::PI * k as f64 / PHASES_PER_CHANNEL as f64;
                        C64::from_polar(m.sqrt(), phase)
                    })
                    .collect();
                let (m1, m2) = deriv.margins(bounds, &z);
                worst = (worst.0.min(m1), worst.1.min(m2));
            }
            worst
        })
        .collect();
    Ok(RegionMask {
        grid: grid.clone(),
        admissible: cells.iter().map(|&(a, b)| a >= 0.0 && b >= 0.0).collect(),
        margin1: cells.iter().map(|c| c.0).collect(),
        margin2: cells.iter().map(|c| c.1).collect(),
    })
}
