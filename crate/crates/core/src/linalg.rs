//! Dense complex linear algebra helpers on top of nalgebra.

use nalgebra::{DMatrix, DVector, Schur, SymmetricEigen};
use num_complex::Complex64;

use crate::error::{Error, Result};

pub type C64 = Complex64;
pub type CMat = DMatrix<C64>;
pub type CVec = DVector<C64>;

pub const I: C64 = C64::new(0.0, 1.0);

pub fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

pub fn real(x: f64) -> C64 {
    C64::new(x, 0.0)
}

pub fn zeros(r: usize, c: usize) -> CMat {
    CMat::zeros(r, c)
}

pub fn eye(n: usize) -> CMat {
    CMat::identity(n, n)
}

/// Entrywise complex conjugate (the `#` operation on matrices).
pub fn conj(m: &CMat) -> CMat {
    m.map(|z| z.conj())
}

pub fn max_abs(m: &CMat) -> f64 {
    m.iter().fold(0.0, |acc, z| acc.max(z.norm()))
}

pub fn hermitian_part(m: &CMat) -> CMat {
    (m + m.adjoint()).scale(0.5)
}

pub fn block_diag2(a: &CMat, b: &CMat) -> CMat {
    let mut out = zeros(a.nrows() + b.nrows(), a.ncols() + b.ncols());
    out.view_mut((0, 0), a.shape()).copy_from(a);
    out.view_mut((a.nrows(), a.ncols()), b.shape()).copy_from(b);
    out
}

/// Kronecker product `a ⊗ b`.
pub fn kron(a: &CMat, b: &CMat) -> CMat {
    let (ra, ca) = a.shape();
    let (rb, cb) = b.shape();
    let mut out = zeros(ra * rb, ca * cb);
    for i in 0..ra {
        for j in 0..ca {
            let w = a[(i, j)];
            if w != C64::new(0.0, 0.0) {
                out.view_mut((i * rb, j * cb), (rb, cb)).copy_from(&(b * w));
            }
        }
    }
    out
}

/// Assembles `[[a, b], [c, d]]`.
pub fn block2x2(a: &CMat, b: &CMat, c: &CMat, d: &CMat) -> CMat {
    let (r0, c0) = a.shape();
    let (r1, c1) = d.shape();
    let mut out = zeros(r0 + r1, c0 + c1);
    out.view_mut((0, 0), (r0, c0)).copy_from(a);
    out.view_mut((0, c0), (r0, c1)).copy_from(b);
    out.view_mut((r0, 0), (r1, c0)).copy_from(c);
    out.view_mut((r0, c0), (r1, c1)).copy_from(d);
    out
}

fn schur(m: &CMat) -> Result<Schur<C64, nalgebra::Dyn>> {
    let n = m.nrows();
    Schur::try_new(m.clone(), f64::EPSILON, 10_000 + 100 * n).ok_or(Error::Eigen(n))
}

/// Eigenvalues of a general complex square matrix.
pub fn eigenvalues(m: &CMat) -> Result<Vec<C64>> {
    let n = m.nrows();
    if n == 0 {
        return Ok(Vec::new());
    }
    let (_, t) = schur(m)?.unpack();
    Ok((0..n).map(|i| t[(i, i)]).collect())
}

/// Maximum real part of the spectrum.
pub fn spectral_abscissa(m: &CMat) -> Result<f64> {
    Ok(eigenvalues(m)?
        .iter()
        .map(|z| z.re)
        .fold(f64::NEG_INFINITY, f64::max))
}

/// Eigen-decomposition of the Hermitian part of `m`, eigenvalues ascending.
pub fn hermitian_eigh(m: &CMat) -> (Vec<f64>, CMat) {
    let eig = SymmetricEigen::new(hermitian_part(m));
    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let vals = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let vecs = CMat::from_fn(m.nrows(), order.len(), |r, k| {
        eig.eigenvectors[(r, order[k])]
    });
    (vals, vecs)
}

pub fn hermitian_eigenvalues(m: &CMat) -> Vec<f64> {
    hermitian_eigh(m).0
}

pub fn lambda_max(m: &CMat) -> f64 {
    hermitian_eigenvalues(m)
        .last()
        .copied()
        .unwrap_or(f64::NEG_INFINITY)
}

pub fn lambda_min(m: &CMat) -> f64 {
    hermitian_eigenvalues(m)
        .first()
        .copied()
        .unwrap_or(f64::INFINITY)
}

/// Largest singular value.
pub fn sigma_max(m: &CMat) -> f64 {
    if m.is_empty() {
        return 0.0;
    }
    m.singular_values().iter().fold(0.0, |acc, &s| acc.max(s))
}

/// Solves `a† X + X a + q = 0` by the Bartels–Stewart method on the complex
/// Schur form of `a`.
pub fn solve_lyapunov(a: &CMat, q: &CMat) -> Result<CMat> {
    let n = a.nrows();
    if a.ncols() != n || q.shape() != (n, n) {
        return Err(Error::Dimension {
            left: "A",
            left_shape: a.shape(),
            right: "Q",
            right_shape: q.shape(),
        });
    }
    let (u, t) = schur(a)?.unpack();
    // T† Y + Y T = -U† Q U
    let rhs = -(u.adjoint() * q * &u);
    let th = t.adjoint();
    let scale = 1.0 + max_abs(&t);
    let mut y = zeros(n, n);
    for j in 0..n {
        let mut col: CVec = rhs.column(j).into_owned();
        for k in 0..j {
            let tkj = t[(k, j)];
            if tkj != C64::new(0.0, 0.0) {
                col -= y.column(k) * tkj;
            }
        }
        // forward substitution with the lower-triangular T† + t_jj I
        let tjj = t[(j, j)];
        for i in 0..n {
            let mut acc = col[i];
            for k in 0..i {
                acc -= th[(i, k)] * y[(k, j)];
            }
            let d = th[(i, i)] + tjj;
            if d.norm() <= 1e-14 * scale {
                return Err(Error::SingularLyapunov(d.norm()));
            }
            y[(i, j)] = acc / d;
        }
    }
    Ok(&u * y * u.adjoint())
}

/// Inverse through LU; `None` when singular.
pub fn inverse(m: &CMat) -> Option<CMat> {
    m.clone().try_inverse()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample(n: usize, seed: u64) -> CMat {
        let mut s = seed;
        CMat::from_fn(n, n, |_, _| {
            s = s
                .wrapping_mul(6364136223846793005)
                .wrapping_add(1442695040888963407);
            let a = ((s >> 11) as f64 / (1u64 << 53) as f64) - 0.5;
            s = s
                .wrapping_mul(6364136223846793005)
                .wrapping_add(1442695040888963407);
            let b = ((s >> 11) as f64 / (1u64 << 53) as f64) - 0.5;
            c(a, b)
        })
    }

    // Kronecker-vectorized solve, used only as an oracle here.
    fn lyapunov_kron(a: &CMat, q: &CMat) -> CMat {
        let n = a.nrows();
        let mut big = zeros(n * n, n * n);
        // vec(A† X) = (I ⊗ A†) vec X ; vec(X A) = (Aᵀ ⊗ I) vec X  (column-major vec)
        let ah = a.adjoint();
        for col in 0..n {
            for row in 0..n {
                let r = col * n + row;
                for k in 0..n {
                    big[(r, col * n + k)] += ah[(row, k)];
                    big[(r, k * n + row)] += a[(k, col)];
                }
            }
        }
        let rhs = CVec::from_fn(n * n, |r, _| -q[(r % n, r / n)]);
        let x = big.lu().solve(&rhs).unwrap();
        CMat::from_fn(n, n, |r, c| x[c * n + r])
    }

    #[test]
    fn lyapunov_matches_kronecker_oracle() {
        for seed in 0..5 {
            let n = 4;
            let a = sample(n, seed) - eye(n).scale(2.0);
            let q = sample(n, seed + 100);
            let x = solve_lyapunov(&a, &q).unwrap();
            let x_ref = lyapunov_kron(&a, &q);
            assert!(max_abs(&(x - x_ref)) < 1e-10);
        }
    }

    #[test]
    fn lyapunov_residual_vanishes() {
        let a = sample(6, 7) - eye(6).scale(3.0);
        let q = eye(6);
        let x = solve_lyapunov(&a, &q).unwrap();
        let res = a.adjoint() * &x + &x * &a + &q;
        assert!(max_abs(&res) < 1e-11);
    }

    #[test]
    fn singular_lyapunov_detected() {
        let a = zeros(2, 2);
        assert!(matches!(
            solve_lyapunov(&a, &eye(2)),
            Err(Error::SingularLyapunov(_))
        ));
    }

    #[test]
    fn eigenvalues_of_triangular() {
        let mut m = zeros(3, 3);
        m[(0, 0)] = c(-1.0, 2.0);
        m[(1, 1)] = c(0.5, 0.0);
        m[(2, 2)] = c(0.0, -1.0);
        m[(0, 2)] = c(4.0, 0.0);
        let mut ev = eigenvalues(&m).unwrap();
        ev.sort_by(|a, b| a.re.total_cmp(&b.re));
        assert!((ev[0] - c(-1.0, 2.0)).norm() < 1e-12);
        assert!((spectral_abscissa(&m).unwrap() - 0.5).abs() < 1e-12);
    }
}
