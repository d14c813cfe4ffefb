//! Admissible Clifford module data for a fixed list of signatures.
//!
//! Bases are ordered (positive block, negative block), so tau = diag(I_n, -I_n)
//! and the module form is <X, Y>_V = X^T tau Y. The first r generators are
//! positive (rho^2 = -I), the last s negative (rho^2 = +I).

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const CATALOG_JSON: &str = include_str!("../data/catalog.json");

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Signature {
    pub r: usize,
    pub s: usize,
    /// Half the module dimension.
    pub n: usize,
}

impl Signature {
    pub fn new(r: usize, s: usize, n: usize) -> Self {
        Self { r, s, n }
    }

    pub fn dim_v(&self) -> usize {
        2 * self.n
    }

    pub fn dim_z(&self) -> usize {
        self.r + self.s
    }

    pub fn dim(&self) -> usize {
        2 * self.n + self.r + self.s
    }

    /// <eta, eta>_{r,s} = |eta_+|^2 - |eta_-|^2.
    pub fn form(&self, eta: &[f64]) -> f64 {
        eta.iter()
            .enumerate()
            .map(|(k, e)| if k < self.r { e * e } else { -e * e })
            .sum()
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct Entry {
    r: usize,
    s: usize,
    n: usize,
    rho: Vec<Vec<Vec<i32>>>,
}

#[derive(Debug, Clone)]
pub struct AdmissibleModule {
    pub sig: Signature,
    pub rho_gen: Vec<DMatrix<f64>>,
    pub tau: DMatrix<f64>,
    /// +1 for positive basis vectors, -1 for negative ones.
    pub form_signature_labels: Vec<i8>,
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct ValidationReport {
    pub gl3: f64,
    pub gl2: f64,
    pub clifford: f64,
    pub tau_skew: f64,
    pub block: f64,
    pub pass: bool,
}

pub const TOL: f64 = 1e-12;

fn tau(n: usize) -> DMatrix<f64> {
    DMatrix::from_fn(2 * n, 2 * n, |i, j| {
        if i != j {
            0.0
        } else if i < n {
            1.0
        } else {
            -1.0
        }
    })
}

fn entries() -> Vec<Entry> {
    serde_json::from_str(CATALOG_JSON).expect("shipped catalog parses")
}

/// Signatures shipped with the library.
pub fn catalog() -> Vec<Signature> {
    entries().iter().map(|e| Signature::new(e.r, e.s, e.n)).collect()
}

/// The raw catalog document.
pub fn catalog_json() -> &'static str {
    CATALOG_JSON
}

fn from_entry(e: &Entry) -> Result<AdmissibleModule> {
    let sig = Signature::new(e.r, e.s, e.n);
    let d = sig.dim_v();
    if e.rho.len() != sig.dim_z() {
        return Err(Error::InvalidCatalog(format!(
            "{:?}: expected {} generators, found {}",
            sig,
            sig.dim_z(),
            e.rho.len()
        )));
    }
    let mut gens = Vec::new();
    for m in &e.rho {
        if m.len() != d || m.iter().any(|row| row.len() != d) {
            return Err(Error::InvalidCatalog(format!("{sig:?}: generator is not {d}x{d}")));
        }
        gens.push(DMatrix::from_fn(d, d, |i, j| m[i][j] as f64));
    }
    let labels = (0..d).map(|i| if i < sig.n { 1 } else { -1 }).collect();
    Ok(AdmissibleModule {
        sig,
        rho_gen: gens,
        tau: tau(sig.n),
        form_signature_labels: labels,
    })
}

/// Parses a catalog document and validates every entry.
pub fn load_catalog(json: &str) -> Result<Vec<AdmissibleModule>> {
    let es: Vec<Entry> =
        serde_json::from_str(json).map_err(|e| Error::InvalidCatalog(e.to_string()))?;
    es.iter()
        .map(|e| {
            let m = from_entry(e)?;
            let rep = validate_module(&m);
            if rep.pass {
                Ok(m)
            } else {
                Err(Error::InvalidCatalog(format!("{:?} fails validation: {rep:?}", m.sig)))
            }
        })
        .collect()
}

/// Looks up and validates the module for `sig`.
pub fn build_module(sig: Signature) -> Result<AdmissibleModule> {
    let e = entries()
        .into_iter()
        .find(|e| e.r == sig.r && e.s == sig.s && e.n == sig.n)
        .ok_or(Error::UnknownSignature { r: sig.r, s: sig.s, n: sig.n })?;
    let m = from_entry(&e)?;
    let rep = validate_module(&m);
    if !rep.pass {
        return Err(Error::InvalidCatalog(format!("{sig:?} fails validation: {rep:?}")));
    }
    Ok(m)
}

/// rho(eta) = sum_k eta_k rho(Z_k).
pub fn rho(m: &AdmissibleModule, eta: &[f64]) -> Result<DMatrix<f64>> {
    if eta.len() != m.sig.dim_z() {
        return Err(Error::DimensionMismatch { expected: m.sig.dim_z(), got: eta.len() });
    }
    let d = m.sig.dim_v();
    let mut out = DMatrix::zeros(d, d);
    for (e, g) in eta.iter().zip(&m.rho_gen) {
        out += g * *e;
    }
    Ok(out)
}

fn max_abs(m: &DMatrix<f64>) -> f64 {
    m.iter().fold(0.0, |a, x| a.max(x.abs()))
}

pub fn validate_module(m: &AdmissibleModule) -> ValidationReport {
    let sig = m.sig;
    let n = sig.n;
    let d = sig.dim_v();
    let id = DMatrix::<f64>::identity(d, d);
    let sign = |k: usize| if k < sig.r { 1.0 } else { -1.0 };
    let (mut gl3, mut gl2, mut cl, mut sk, mut blk) = (0.0f64, 0.0f64, 0.0f64, 0.0f64, 0.0f64);
    if m.rho_gen.len() != sig.dim_z() || m.rho_gen.iter().any(|g| g.shape() != (d, d)) {
        return ValidationReport {
            gl3: f64::INFINITY,
            gl2: f64::INFINITY,
            clifford: f64::INFINITY,
            tau_skew: f64::INFINITY,
            block: f64::INFINITY,
            pass: false,
        };
    }
    for (k, a) in m.rho_gen.iter().enumerate() {
        // GL_3 on generators: J_z^2 = -<z,z> I.
        gl3 = gl3.max(max_abs(&(a * a + &id * sign(k))));
        // GL_2: <J X, Y>_V + <X, J Y>_V = 0, i.e. a^T tau + tau a = 0.
        gl2 = gl2.max(max_abs(&(a.transpose() * &m.tau + &m.tau * a)));
        let ta = &m.tau * a;
        sk = sk.max(max_abs(&(&ta + ta.transpose())));
        for b in m.rho_gen.iter().skip(k + 1) {
            cl = cl.max(max_abs(&(a * b + b * a)));
        }
        let a11 = a.view((0, 0), (n, n));
        let a12 = a.view((0, n), (n, n));
        let a21 = a.view((n, 0), (n, n));
        let a22 = a.view((n, n), (n, n));
        if k < sig.r {
            blk = blk.max(max_abs(&a12.clone_owned())).max(max_abs(&a21.clone_owned()));
            blk = blk.max(max_abs(&(a11 + a11.transpose()))).max(max_abs(&(a22 + a22.transpose())));
            for b in m.rho_gen.iter().skip(sig.r) {
                let bb = b.view((0, n), (n, n));
                blk = blk.max(max_abs(&(a11 * bb + bb * a22)));
            }
        } else {
            blk = blk.max(max_abs(&a11.clone_owned())).max(max_abs(&a22.clone_owned()));
            blk = blk.max(max_abs(&(a21 - a12.transpose())));
        }
    }
    let pass = gl3 <= TOL && gl2 <= TOL && cl <= TOL && sk <= TOL && blk <= TOL;
    ValidationReport { gl3, gl2, clifford: cl, tau_skew: sk, block: blk, pass }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn heisenberg_generator() {
        let m = build_module(Signature::new(0, 1, 1)).unwrap();
        assert_eq!(m.rho_gen[0], DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 1.0, 0.0]));
        let r = validate_module(&m);
        assert!(r.pass && r.gl3 == 0.0 && r.gl2 == 0.0 && r.tau_skew == 0.0);
    }

    #[test]
    fn every_entry_validates() {
        for sig in catalog() {
            assert!(validate_module(&build_module(sig).unwrap()).pass, "{sig:?}");
        }
        assert_eq!(load_catalog(catalog_json()).unwrap().len(), catalog().len());
    }

    #[test]
    fn corrupted_generator_fails() {
        let mut m = build_module(Signature::new(1, 2, 2)).unwrap();
        m.rho_gen[0][(1, 0)] = -m.rho_gen[0][(1, 0)];
        let r = validate_module(&m);
        assert!(!r.pass && r.gl3 >= 1.0);
    }

    #[test]
    fn unknown_signature() {
        assert!(matches!(
            build_module(Signature::new(0, 2, 1)),
            Err(Error::UnknownSignature { .. })
        ));
    }

    #[test]
    fn rho_is_linear_and_checks_dimension() {
        let m = build_module(Signature::new(1, 1, 2)).unwrap();
        assert_eq!(rho(&m, &[0.0, 0.0]).unwrap(), DMatrix::zeros(4, 4));
        assert!(rho(&m, &[1.0]).is_err());
        let a = rho(&m, &[0.3, -1.2]).unwrap();
        let b = &m.rho_gen[0] * 0.3 - &m.rho_gen[1] * 1.2;
        assert_eq!(a, b);
    }

    #[test]
    fn catalog_rejects_bad_document() {
        let bad = r#"[{"r":0,"s":1,"n":1,"rho":[[[0,1],[-1,0]]]}]"#;
        assert!(load_catalog(bad).is_err());
    }

    /// With dim V = 2 the maps with tau*rho skew form a line spanned by
    /// [[0,1],[1,0]], so two anticommuting negative generators cannot exist.
    #[test]
    fn two_negative_generators_need_n_at_least_two() {
        let t = tau(1);
        let mut sys = DMatrix::<f64>::zeros(4, 4);
        for idx in 0..4 {
            let mut e = DMatrix::<f64>::zeros(2, 2);
            e[(idx / 2, idx % 2)] = 1.0;
            let te = &t * &e;
            let c = &te + te.transpose();
            for k in 0..4 {
                sys[(k, idx)] = c[(k / 2, k % 2)];
            }
        }
        assert_eq!(4 - sys.rank(1e-12), 1);
    }
}
