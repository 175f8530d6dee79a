//! Nominal linear quantum system in the doubled-up `[a; a#]` representation.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{block2x2, conj, eye, max_abs, zeros, CMat};

/// Signature matrix `J = diag(I, -I)` and block swap `Σ = [[0, I], [I, 0]]`.
#[derive(Clone, Debug, PartialEq)]
pub struct StructureMatrices {
    pub n: usize,
    pub j: CMat,
    pub sigma: CMat,
}

impl StructureMatrices {
    pub fn new(n: usize) -> Self {
        let id = eye(n);
        let z = zeros(n, n);
        StructureMatrices {
            n,
            j: block2x2(&id, &z, &z, &(-&id)),
            sigma: block2x2(&z, &id, &id, &z),
        }
    }
}

/// Known part of the model: quadratic Hamiltonian blocks `M1, M2`, coupling
/// blocks `N1, N2` and perturbation channel blocks `E1, E2`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LinearQuantumSystem {
    /// Mode count.
    pub n: usize,
    /// Coupling channels.
    pub m: usize,
    /// Perturbation channels.
    pub p: usize,
    #[serde(with = "crate::io::cmat_serde")]
    pub m1: CMat,
    #[serde(with = "crate::io::cmat_serde")]
    pub m2: CMat,
    #[serde(with = "crate::io::cmat_serde")]
    pub n1: CMat,
    #[serde(with = "crate::io::cmat_serde")]
    pub n2: CMat,
    #[serde(with = "crate::io::cmat_serde")]
    pub e1: CMat,
    #[serde(with = "crate::io::cmat_serde")]
    pub e2: CMat,
}

/// Doubled-up matrices `M` (2n×2n), `N` (2m×2n) and `Ẽ = [E1 E2]` (p×2n).
#[derive(Clone, Debug, PartialEq)]
pub struct Doubled {
    pub m: CMat,
    pub n: CMat,
    pub e_tilde: CMat,
}

impl Doubled {
    /// Row `Ẽᵢ` (0-based channel index).
    pub fn e_row(&self, i: usize) -> CMat {
        self.e_tilde.rows(i, 1).into_owned()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Violation {
    pub matrix: &'static str,
    pub kind: &'static str,
    pub residual: f64,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} {}, residual {:?}",
            self.matrix, self.kind, self.residual
        )
    }
}

fn check_shape(
    name: &'static str,
    m: &CMat,
    want: (usize, usize),
    against: &'static str,
) -> Result<()> {
    if m.shape() != want {
        return Err(Error::Dimension {
            left: name,
            left_shape: m.shape(),
            right: against,
            right_shape: want,
        });
    }
    Ok(())
}

impl LinearQuantumSystem {
    /// Builds a system, inferring `n, m, p` from `M1`, `N1` and `E1`.
    pub fn new(m1: CMat, m2: CMat, n1: CMat, n2: CMat, e1: CMat, e2: CMat) -> Result<Self> {
        let sys = LinearQuantumSystem {
            n: m1.nrows(),
            m: n1.nrows(),
            p: e1.nrows(),
            m1,
            m2,
            n1,
            n2,
            e1,
            e2,
        };
        sys.check_dimensions()?;
        Ok(sys)
    }

    pub fn check_dimensions(&self) -> Result<()> {
        let (n, m, p) = (self.n, self.m, self.p);
        if n == 0 {
            return Err(Error::InvalidParameter(
                "mode count must be positive".into(),
            ));
        }
        check_shape("M1", &self.m1, (n, n), "n×n")?;
        check_shape("M2", &self.m2, self.m1.shape(), "M1")?;
        check_shape("N1", &self.n1, (m, n), "m×n")?;
        check_shape("N2", &self.n2, self.n1.shape(), "N1")?;
        check_shape("E1", &self.e1, (p, n), "p×n")?;
        check_shape("E2", &self.e2, self.e1.shape(), "E1")?;
        Ok(())
    }

    /// Symmetry violations: `M1` must be Hermitian and `M2` symmetric.
    pub fn validate(&self) -> Result<Vec<Violation>> {
        self.check_dimensions()?;
        let mut out = Vec::new();
        let herm = max_abs(&(&self.m1 - self.m1.adjoint()));
        if herm > 1e-10 * (1.0 + max_abs(&self.m1)) {
            out.push(Violation {
                matrix: "M1",
                kind: "not Hermitian",
                residual: herm,
            });
        }
        let sym = max_abs(&(&self.m2 - self.m2.transpose()));
        if sym > 1e-10 * (1.0 + max_abs(&self.m2)) {
            out.push(Violation {
                matrix: "M2",
                kind: "asymmetric",
                residual: sym,
            });
        }
        Ok(out)
    }

    pub fn doubled(&self) -> Doubled {
        let m = block2x2(&self.m1, &self.m2, &conj(&self.m2), &conj(&self.m1));
        let n = block2x2(&self.n1, &self.n2, &conj(&self.n2), &conj(&self.n1));
        let mut e_tilde = zeros(self.p, 2 * self.n);
        e_tilde
            .view_mut((0, 0), (self.p, self.n))
            .copy_from(&self.e1);
        e_tilde
            .view_mut((0, self.n), (self.p, self.n))
            .copy_from(&self.e2);
        Doubled { m, n, e_tilde }
    }

    pub fn structure(&self) -> StructureMatrices {
        StructureMatrices::new(self.n)
    }
}
