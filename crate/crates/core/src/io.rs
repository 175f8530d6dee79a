//! JSON and CSV formats, plus atomic file output.
//!
//! Complex matrices travel as nested row arrays of `[re, im]` pairs. Series
//! terms use 1-based channel indices.

use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::certify::{BlockRoute, CertificateConstants, StabilityCertificate, Verdict};
use crate::error::{Error, Result};
use crate::focksim::{BoundReport, FockTrajectory, IdentityReport};
use crate::linalg::{zeros, CMat, C64};
use crate::model::LinearQuantumSystem;
use crate::opa::{OpaParams, RegionCurve};
use crate::perturbation::{PerturbationSeries, RegionMask, SectorBounds};

/// Wire form of a complex matrix.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct WireMatrix(pub Vec<Vec<[f64; 2]>>);

impl From<&CMat> for WireMatrix {
    fn from(m: &CMat) -> Self {
        WireMatrix(
            (0..m.nrows())
                .map(|r| {
                    (0..m.ncols())
                        .map(|c| [m[(r, c)].re, m[(r, c)].im])
                        .collect()
                })
                .collect(),
        )
    }
}

impl WireMatrix {
    pub fn to_cmat(&self) -> Result<CMat> {
        let rows = self.0.len();
        let cols = self.0.first().map_or(0, Vec::len);
        if let Some((r, bad)) = self.0.iter().enumerate().find(|(_, row)| row.len() != cols) {
            return Err(Error::Config(format!(
                "ragged matrix: row {} has {} entries, expected {cols}",
                r + 1,
                bad.len()
            )));
        }
        let mut m = zeros(rows, cols);
        for (r, row) in self.0.iter().enumerate() {
            for (c, v) in row.iter().enumerate() {
                m[(r, c)] = C64::new(v[0], v[1]);
            }
        }
        Ok(m)
    }
}

/// `#[serde(with = ...)]` adapter for [`CMat`].
pub mod cmat_serde {
    use serde::de::Error as _;
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    use super::WireMatrix;
    use crate::linalg::CMat;

    pub fn serialize<S: Serializer>(m: &CMat, s: S) -> Result<S::Ok, S::Error> {
        WireMatrix::from(m).serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<CMat, D::Error> {
        WireMatrix::deserialize(d)?
            .to_cmat()
            .map_err(D::Error::custom)
    }
}

fn wire_complex(v: &[C64]) -> Vec<[f64; 2]> {
    v.iter().map(|z| [z.re, z.im]).collect()
}

fn from_wire_complex(v: &[[f64; 2]]) -> Vec<C64> {
    v.iter().map(|z| C64::new(z[0], z[1])).collect()
}

/// One monomial `S_{ijkl} z_i^k (z_j^*)^l` with 1-based `i`, `j`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SeriesTerm {
    pub i: usize,
    pub j: usize,
    pub k: u32,
    pub l: u32,
    pub re: f64,
    pub im: f64,
}

pub fn series_from_terms(p: usize, terms: &[SeriesTerm]) -> Result<PerturbationSeries> {
    let mut s = PerturbationSeries::new(p);
    for t in terms {
        for idx in [t.i, t.j] {
            if idx == 0 || idx > p {
                return Err(Error::IndexOutOfRange { index: idx, max: p });
            }
        }
        s.add_term(t.i - 1, t.j - 1, t.k, t.l, C64::new(t.re, t.im))?;
    }
    Ok(s)
}

pub fn series_to_terms(s: &PerturbationSeries) -> Vec<SeriesTerm> {
    s.terms()
        .map(|((i, j, k, l), v)| SeriesTerm {
            i: i + 1,
            j: j + 1,
            k,
            l,
            re: v.re,
            im: v.im,
        })
        .collect()
}

/// Nominal system as six matrix blocks.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SystemSpec {
    pub m1: WireMatrix,
    pub m2: WireMatrix,
    pub n1: WireMatrix,
    pub n2: WireMatrix,
    pub e1: WireMatrix,
    pub e2: WireMatrix,
}

impl SystemSpec {
    pub fn build(&self) -> Result<LinearQuantumSystem> {
        LinearQuantumSystem::new(
            self.m1.to_cmat()?,
            self.m2.to_cmat()?,
            self.n1.to_cmat()?,
            self.n2.to_cmat()?,
            self.e1.to_cmat()?,
            self.e2.to_cmat()?,
        )
    }
}

impl From<&LinearQuantumSystem> for SystemSpec {
    fn from(s: &LinearQuantumSystem) -> Self {
        SystemSpec {
            m1: (&s.m1).into(),
            m2: (&s.m2).into(),
            n1: (&s.n1).into(),
            n2: (&s.n2).into(),
            e1: (&s.e1).into(),
            e2: (&s.e2).into(),
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OpaSpec {
    pub kappa1: Option<f64>,
    pub kappa2: Option<f64>,
    pub chi: Option<f64>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoundsSpec {
    pub gamma: Option<f64>,
    pub delta1: Option<f64>,
    pub delta2: Option<f64>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimSpec {
    pub dim: Option<usize>,
    pub dt: Option<f64>,
    pub t_final: Option<f64>,
    /// Coherent amplitudes `α_j`, one `[re, im]` per mode.
    pub alpha: Option<Vec<[f64; 2]>>,
    /// OPA only: target `|z₁|², |z₂|²` of the initial coherent state.
    pub z_sq: Option<[f64; 2]>,
    pub sample_every: Option<usize>,
}

impl SimSpec {
    pub fn alpha(&self) -> Option<Vec<C64>> {
        self.alpha.as_deref().map(from_wire_complex)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSpec {
    /// One of `kappa1`, `kappa2`, `chi`, `gamma`, `delta1`, `delta2`.
    pub parameter: String,
    pub from: f64,
    pub to: f64,
    pub steps: usize,
}

/// Single JSON document driving a CLI run; command-line flags override it.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    pub opa: Option<OpaSpec>,
    pub system: Option<SystemSpec>,
    pub series: Option<Vec<SeriesTerm>>,
    #[serde(default)]
    pub bounds: BoundsSpec,
    pub eps: Option<f64>,
    pub sim: Option<SimSpec>,
    pub sweep: Option<SweepSpec>,
    pub grid: Option<usize>,
    pub samples: Option<usize>,
    pub out: Option<String>,
    pub seed: Option<u64>,
}

pub fn read_config(path: &Path) -> Result<ConfigFile> {
    let text = fs::read_to_string(path)
        .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
}

/// Serialized certificate; every optional quantity is `null` when the
/// pipeline stopped before computing it.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CertificateJson {
    pub verdict: Verdict,
    pub gamma: f64,
    pub delta1: f64,
    pub delta2: f64,
    pub f: WireMatrix,
    pub abscissa: f64,
    pub hinf_primary: Option<f64>,
    pub hinf_reduced: Option<f64>,
    pub p: Option<WireMatrix>,
    pub qmi_max_eig: Option<f64>,
    pub route: Option<BlockRoute>,
    pub eps: Option<f64>,
    pub mu: Vec<[f64; 2]>,
    pub lambda_tilde: Option<f64>,
    pub lambda: Option<f64>,
    pub c: Option<f64>,
    pub c1: Option<f64>,
    pub c2: Option<f64>,
    pub c3: Option<f64>,
    pub invariant_level: Option<f64>,
}

impl From<&StabilityCertificate> for CertificateJson {
    fn from(c: &StabilityCertificate) -> Self {
        let k = c.constants;
        CertificateJson {
            verdict: c.verdict,
            gamma: c.bounds.gamma,
            delta1: c.bounds.delta1,
            delta2: c.bounds.delta2,
            f: (&c.f).into(),
            abscissa: c.abscissa,
            hinf_primary: c.hinf_primary,
            hinf_reduced: c.hinf_reduced,
            p: c.p.as_ref().map(WireMatrix::from),
            qmi_max_eig: c.qmi_max_eig,
            route: c.route,
            eps: c.eps,
            mu: wire_complex(&c.mu),
            lambda_tilde: k.map(|k| k.lambda_tilde),
            lambda: k.map(|k| k.lambda),
            c: k.map(|k| k.c),
            c1: k.map(|k| k.c1),
            c2: k.map(|k| k.c2),
            c3: k.map(|k| k.c3),
            invariant_level: c.invariant_level,
        }
    }
}

impl CertificateJson {
    pub fn to_certificate(&self) -> Result<StabilityCertificate> {
        let constants = match (
            self.lambda_tilde,
            self.lambda,
            self.c,
            self.c1,
            self.c2,
            self.c3,
        ) {
            (Some(lambda_tilde), Some(lambda), Some(c), Some(c1), Some(c2), Some(c3)) => {
                Some(CertificateConstants {
                    lambda_tilde,
                    lambda,
                    c,
                    c1,
                    c2,
                    c3,
                })
            }
            (None, None, None, None, None, None) => None,
            _ => {
                return Err(Error::Config(
                    "certificate constants are partially present".into(),
                ))
            }
        };
        Ok(StabilityCertificate {
            verdict: self.verdict,
            bounds: SectorBounds {
                gamma: self.gamma,
                delta1: self.delta1,
                delta2: self.delta2,
            },
            f: self.f.to_cmat()?,
            abscissa: self.abscissa,
            hinf_primary: self.hinf_primary,
            hinf_reduced: self.hinf_reduced,
            p: self.p.as_ref().map(WireMatrix::to_cmat).transpose()?,
            qmi_max_eig: self.qmi_max_eig,
            route: self.route,
            eps: self.eps,
            mu: from_wire_complex(&self.mu),
            constants,
            invariant_level: self.invariant_level,
        })
    }
}

pub fn certificate_to_json(c: &StabilityCertificate) -> Result<String> {
    Ok(serde_json::to_string_pretty(&CertificateJson::from(c))?)
}

pub fn certificate_from_json(text: &str) -> Result<StabilityCertificate> {
    serde_json::from_str::<CertificateJson>(text)?.to_certificate()
}

pub fn identity_report_json(r: &IdentityReport) -> Result<String> {
    let map: BTreeMap<&str, f64> = r
        .checks
        .iter()
        .map(|c| (c.name.as_str(), c.residual))
        .collect();
    Ok(serde_json::to_string_pretty(&map)?)
}

/// Writes via a temporary file in the target directory and renames it into
/// place, so readers never see a partial file.
pub fn write_atomic(path: &Path, contents: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d.to_path_buf(),
        _ => PathBuf::from("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(&dir)?;
    tmp.write_all(contents)?;
    tmp.as_file().sync_all()?;
    tmp.persist(path).map_err(|e| Error::Io(e.error))?;
    Ok(())
}

/// CSV text with a header row and `\n` line endings.
pub fn csv_string(header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> String {
    let mut out = header.join(",");
    out.push('\n');
    for row in rows {
        out.push_str(&row.join(","));
        out.push('\n');
    }
    out
}

pub fn region_mask_csv(mask: &RegionMask) -> String {
    csv_string(
        &["|z1|^2", "|z2|^2", "admissible", "margin1", "margin2"],
        (0..mask.admissible.len()).map(|k| {
            let pt = mask.point(k);
            let z2 = pt.get(1).copied().unwrap_or(0.0);
            vec![
                pt[0].to_string(),
                z2.to_string(),
                u8::from(mask.admissible[k]).to_string(),
                mask.margin1[k].to_string(),
                mask.margin2[k].to_string(),
            ]
        }),
    )
}

pub fn region_curve_csv(curve: &RegionCurve) -> String {
    csv_string(
        &["z1sq", "z2sq_cap", "active_constraint"],
        curve.samples.iter().map(|s| {
            vec![
                s.z1sq.to_string(),
                s.z2sq_max.to_string(),
                s.active.label().to_string(),
            ]
        }),
    )
}

pub fn trajectory_csv(traj: &FockTrajectory, report: &BoundReport) -> String {
    csv_string(
        &["t", "msq", "bound", "slack"],
        traj.times
            .iter()
            .zip(&traj.msq)
            .zip(&report.bound)
            .map(|((t, m), b)| {
                vec![
                    t.to_string(),
                    m.to_string(),
                    b.to_string(),
                    (b - m).to_string(),
                ]
            }),
    )
}

pub fn opa_params_from(spec: &OpaSpec, default_chi: f64) -> Result<OpaParams> {
    let k1 = spec
        .kappa1
        .ok_or_else(|| Error::Config("missing kappa1".into()))?;
    let k2 = spec
        .kappa2
        .ok_or_else(|| Error::Config("missing kappa2".into()))?;
    OpaParams::new(k1, k2, spec.chi.unwrap_or(default_chi))
        .map_err(|e| Error::Config(e.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::certify::certify;
    use crate::linalg::{c, real};
    use crate::opa::build_opa;

    #[test]
    fn matrix_wire_round_trip() {
        let mut m = zeros(2, 3);
        m[(0, 1)] = c(0.1, -2.5);
        m[(1, 2)] = real(1.0 / 3.0);
        let text = serde_json::to_string(&WireMatrix::from(&m)).unwrap();
        assert_eq!(
            text,
            "[[[0.0,0.0],[0.1,-2.5],[0.0,0.0]],[[0.0,0.0],[0.0,0.0],[0.3333333333333333,0.0]]]"
        );
        let back: WireMatrix = serde_json::from_str(&text).unwrap();
        assert_eq!(back.to_cmat().unwrap(), m);
    }

    #[test]
    fn ragged_matrix_rejected() {
        let w: WireMatrix = serde_json::from_str("[[[1,0]],[[1,0],[2,0]]]").unwrap();
        assert!(matches!(w.to_cmat(), Err(Error::Config(_))));
    }

    #[test]
    fn series_terms_are_one_based() {
        let (_, f) = build_opa(&OpaParams::new(1.0, 1.0, 0.1).unwrap()).unwrap();
        let terms = series_to_terms(&f);
        assert!(terms
            .iter()
            .any(|t| t.i == 2 && t.j == 1 && t.k == 1 && t.l == 2));
        assert_eq!(series_from_terms(2, &terms).unwrap(), f);
        let bad = SeriesTerm {
            i: 0,
            j: 1,
            k: 1,
            l: 0,
            re: 1.0,
            im: 0.0,
        };
        assert!(matches!(
            series_from_terms(2, &[bad]),
            Err(Error::IndexOutOfRange { .. })
        ));
    }

    #[test]
    fn certificate_round_trip_is_exact() {
        let (sys, _) = build_opa(&OpaParams::new(1.0, 2.0, 0.1).unwrap()).unwrap();
        let cert = certify(&sys, &SectorBounds::new(4.5, 0.0, 0.0).unwrap()).unwrap();
        let back = certificate_from_json(&certificate_to_json(&cert).unwrap()).unwrap();
        assert_eq!(back, cert);

        let failed = certify(&sys, &SectorBounds::new(3.0, 0.0, 0.0).unwrap()).unwrap();
        let text = certificate_to_json(&failed).unwrap();
        assert!(text.contains("\"p\": null"));
        assert_eq!(certificate_from_json(&text).unwrap(), failed);
    }

    #[test]
    fn system_spec_round_trip() {
        let (sys, _) = build_opa(&OpaParams::new(1.0, 2.0, 0.1).unwrap()).unwrap();
        let text = serde_json::to_string(&SystemSpec::from(&sys)).unwrap();
        let spec: SystemSpec = serde_json::from_str(&text).unwrap();
        assert_eq!(spec.build().unwrap(), sys);
    }

    #[test]
    fn csv_has_header_and_newlines() {
        let s = csv_string(&["a", "b"], vec![vec!["1".into(), "0.5".into()]]);
        assert_eq!(s, "a,b\n1,0.5\n");
    }

    #[test]
    fn atomic_write_replaces_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("out.txt");
        write_atomic(&path, b"first").unwrap();
        write_atomic(&path, b"second").unwrap();
        assert_eq!(fs::read_to_string(&path).unwrap(), "second");
        assert_eq!(fs::read_dir(dir.path()).unwrap().count(), 1);
    }
}
