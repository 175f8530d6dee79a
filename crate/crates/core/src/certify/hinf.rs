//! H∞ norm of `C (sI - F)^{-1} B` by bisection on the Hamiltonian test
//! matrix `[[F, BB†/δ], [-C†C/δ, -F†]]`.

use crate::error::{Error, Result};
use crate::linalg::{block2x2, eigenvalues, eye, max_abs, sigma_max, CMat, C64};

use super::HURWITZ_TOL;

/// Relative bracket width at which bisection stops.
pub const REL_TOL: f64 = 1e-9;
pub const MAX_ITER: usize = 200;

/// Frequency response `C (iω I - F)^{-1} B`; `None` at a pole.
pub fn transfer_at(f: &CMat, b: &CMat, c: &CMat, omega: f64) -> Option<CMat> {
    let n = f.nrows();
    let shifted = eye(n) * C64::new(0.0, omega) - f;
    let x = shifted.lu().solve(b)?;
    Some(c * x)
}

pub fn sigma_at(f: &CMat, b: &CMat, c: &CMat, omega: f64) -> f64 {
    transfer_at(f, b, c, omega).map_or(f64::INFINITY, |g| sigma_max(&g))
}

fn check_dims(f: &CMat, b: &CMat, c: &CMat) -> Result<()> {
    let n = f.nrows();
    if f.ncols() != n {
        return Err(Error::Dimension {
            left: "F",
            left_shape: f.shape(),
            right: "square",
            right_shape: (n, n),
        });
    }
    if b.nrows() != n {
        return Err(Error::Dimension {
            left: "B",
            left_shape: b.shape(),
            right: "F",
            right_shape: f.shape(),
        });
    }
    if c.ncols() != n {
        return Err(Error::Dimension {
            left: "C",
            left_shape: c.shape(),
            right: "F",
            right_shape: f.shape(),
        });
    }
    Ok(())
}

struct Problem<'a> {
    f: &'a CMat,
    b: &'a CMat,
    c: &'a CMat,
    bb: CMat,
    cc: CMat,
    fh: CMat,
}

impl Problem<'_> {
    /// Largest gain found at the imaginary-axis crossings of the Hamiltonian
    /// for level `delta` and at midpoints between consecutive crossings.
    /// Returns `None` when no eigenvalue is near the imaginary axis.
    fn crossing_gain(&self, delta: f64) -> Result<Option<f64>> {
        let h = block2x2(
            self.f,
            &(&self.bb / C64::new(delta, 0.0)),
            &(&self.cc / C64::new(-delta, 0.0)),
            &self.fh,
        );
        let ev = eigenvalues(&h)?;
        let scale = ev.iter().fold(1.0_f64, |acc, z| acc.max(z.norm()));
        let mut omegas: Vec<f64> = ev
            .iter()
            .filter(|z| z.re.abs() <= 1e-6 * scale)
            .map(|z| z.im)
            .collect();
        if omegas.is_empty() {
            return Ok(None);
        }
        omegas.sort_by(f64::total_cmp);
        let mids: Vec<f64> = omegas.windows(2).map(|w| 0.5 * (w[0] + w[1])).collect();
        let best = omegas
            .iter()
            .chain(&mids)
            .map(|&w| sigma_at(self.f, self.b, self.c, w))
            .fold(0.0, f64::max);
        Ok(Some(best))
    }
}

/// `‖C (sI - F)^{-1} B‖∞` for Hurwitz `F`.
pub fn hinf_norm(f: &CMat, b: &CMat, c: &CMat) -> Result<f64> {
    check_dims(f, b, c)?;
    let abscissa = crate::linalg::spectral_abscissa(f)?;
    if abscissa >= -HURWITZ_TOL {
        return Err(Error::NotHurwitz { abscissa });
    }
    if max_abs(b) == 0.0 || max_abs(c) == 0.0 {
        return Ok(0.0);
    }
    let prob = Problem {
        f,
        b,
        c,
        bb: b * b.adjoint(),
        cc: c.adjoint() * c,
        fh: -f.adjoint(),
    };

    // Lower bound from the DC gain, the resonant frequencies of F and a
    // coarse log grid.
    let mut probes: Vec<f64> = vec![0.0];
    for z in eigenvalues(f)? {
        probes.push(z.im);
        probes.push(z.norm());
        probes.push(-z.norm());
    }
    for k in -8..=8 {
        let w = 10f64.powi(k);
        probes.push(w);
        probes.push(-w);
    }
    let mut lo = probes
        .iter()
        .map(|&w| sigma_at(f, b, c, w))
        .fold(0.0, f64::max);
    if lo == 0.0 {
        return Ok(0.0);
    }

    let mut hi = 2.0 * lo;
    let mut grow = 0;
    while let Some(g) = prob.crossing_gain(hi)? {
        if g < hi {
            break;
        }
        lo = lo.max(g);
        hi = 2.0 * g;
        grow += 1;
        if grow > 100 {
            return Err(Error::HinfNoConvergence {
                iterations: grow,
                lo,
                hi,
            });
        }
    }

    for _ in 0..MAX_ITER {
        if hi - lo <= REL_TOL * hi {
            return Ok(hi);
        }
        let mid = (lo * hi).sqrt();
        match prob.crossing_gain(mid)? {
            Some(g) if g >= mid => lo = lo.max(g).min(hi),
            _ => hi = mid,
        }
    }
    Err(Error::HinfNoConvergence {
        iterations: MAX_ITER,
        lo,
        hi,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{real, zeros};

    fn diag(v: &[f64]) -> CMat {
        let mut m = zeros(v.len(), v.len());
        for (i, &x) in v.iter().enumerate() {
            m[(i, i)] = real(x);
        }
        m
    }

    #[test]
    fn first_order_lag() {
        // 1/(s + a) has peak gain 1/a at DC.
        for a in [0.1, 1.0, 7.5] {
            let n = hinf_norm(&diag(&[-a]), &diag(&[1.0]), &diag(&[1.0])).unwrap();
            assert!((n - 1.0 / a).abs() <= 1e-9 / a, "{n}");
        }
    }

    #[test]
    fn resonant_peak_off_dc() {
        // Lightly damped complex pole at -0.01 + 3i.
        let mut f = zeros(1, 1);
        f[(0, 0)] = C64::new(-0.01, 3.0);
        let n = hinf_norm(&f, &diag(&[1.0]), &diag(&[1.0])).unwrap();
        assert!((n - 100.0).abs() < 1e-6, "{n}");
    }

    #[test]
    fn zero_input_or_output() {
        let f = diag(&[-1.0, -2.0]);
        assert_eq!(hinf_norm(&f, &zeros(2, 1), &zeros(1, 2)).unwrap(), 0.0);
        assert_eq!(
            hinf_norm(&f, &diag(&[1.0, 1.0]), &zeros(1, 2)).unwrap(),
            0.0
        );
    }

    #[test]
    fn unstable_rejected() {
        let err =
            hinf_norm(&diag(&[-1.0, 0.01]), &diag(&[1.0, 1.0]), &diag(&[1.0, 1.0])).unwrap_err();
        assert!(err.to_string().contains("norm undefined"));
    }
}
