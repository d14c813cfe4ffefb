//! Group law, left-invariant fields and the operators built from them.
//!
//! Coordinates on G_{r,s} are (x, z) with x in R^{2n}, z in R^{r+s};
//! the product is (x, z)(y, w) = (x + y, z + w + sum_k <Omega_k^T x, y> e_k)
//! with Omega(eta) = tau rho(eta)^T / 2.

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::clifford_catalog::{self, AdmissibleModule, Signature};
use crate::error::{Error, Result};
use crate::poly::{Poly, C64};
use crate::schwartz_testfn::{GaussMixture, GaussPoly};

#[derive(Debug, Clone)]
pub struct GroupStructure {
    pub module: AdmissibleModule,
    pub omega_gen: Vec<DMatrix<f64>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GroupPoint {
    pub x: Vec<f64>,
    pub z: Vec<f64>,
}

impl GroupPoint {
    pub fn new(x: Vec<f64>, z: Vec<f64>) -> Self {
        Self { x, z }
    }

    pub fn concat(&self) -> Vec<f64> {
        self.x.iter().chain(&self.z).copied().collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FlowSide {
    /// e^{t Omega(eta) tau}
    Right,
    /// e^{t tau Omega(eta)}
    Left,
}

/// Value, gradient and diagonal Hessian of a function at one point.
#[derive(Debug, Clone)]
pub struct Jet {
    pub value: C64,
    pub grad: Vec<C64>,
    pub hess_diag: Vec<C64>,
}

/// P(x) = sum_{j<n} x_j^2 - x_{j+n}^2.
pub fn p_form(x: &[f64]) -> f64 {
    let n = x.len() / 2;
    (0..n).map(|j| x[j] * x[j] - x[j + n] * x[j + n]).sum()
}

/// Dilation (x, z) -> (s x, s^2 z).
pub fn dilate(scale: f64, p: &GroupPoint) -> Result<GroupPoint> {
    if !(scale > 0.0) {
        return Err(Error::NonPositiveScale(scale));
    }
    Ok(GroupPoint {
        x: p.x.iter().map(|v| v * scale).collect(),
        z: p.z.iter().map(|v| v * scale * scale).collect(),
    })
}

/// The dilation as a diagonal matrix on R^{2n+r+s}.
pub fn dilation_matrix(sig: Signature, scale: f64) -> DMatrix<f64> {
    let d = sig.dim();
    DMatrix::from_fn(d, d, |i, j| {
        if i != j {
            0.0
        } else if i < sig.dim_v() {
            scale
        } else {
            scale * scale
        }
    })
}

impl GroupStructure {
    pub fn new(module: AdmissibleModule) -> Self {
        let omega_gen = module
            .rho_gen
            .iter()
            .map(|r| &module.tau * r.transpose() * 0.5)
            .collect();
        Self { module, omega_gen }
    }

    pub fn from_signature(sig: Signature) -> Result<Self> {
        Ok(Self::new(clifford_catalog::build_module(sig)?))
    }

    pub fn sig(&self) -> Signature {
        self.module.sig
    }

    fn check_eta(&self, eta: &[f64]) -> Result<()> {
        let m = self.sig().dim_z();
        if eta.len() != m {
            return Err(Error::DimensionMismatch { expected: m, got: eta.len() });
        }
        Ok(())
    }

    pub fn omega(&self, eta: &[f64]) -> Result<DMatrix<f64>> {
        self.check_eta(eta)?;
        let d = self.sig().dim_v();
        let mut o = DMatrix::zeros(d, d);
        for (e, g) in eta.iter().zip(&self.omega_gen) {
            o += g * *e;
        }
        Ok(o)
    }

    pub fn rho(&self, eta: &[f64]) -> Result<DMatrix<f64>> {
        clifford_catalog::rho(&self.module, eta)
    }

    fn check_point(&self, p: &GroupPoint) -> Result<()> {
        let s = self.sig();
        if p.x.len() != s.dim_v() {
            return Err(Error::DimensionMismatch { expected: s.dim_v(), got: p.x.len() });
        }
        self.check_eta(&p.z)
    }

    pub fn group_mul(&self, p: &GroupPoint, q: &GroupPoint) -> Result<GroupPoint> {
        self.check_point(p)?;
        self.check_point(q)?;
        let x: Vec<f64> = p.x.iter().zip(&q.x).map(|(a, b)| a + b).collect();
        let z = p
            .z
            .iter()
            .zip(&q.z)
            .zip(&self.omega_gen)
            .map(|((a, b), om)| {
                let mut c = 0.0;
                for i in 0..p.x.len() {
                    for j in 0..q.x.len() {
                        c += p.x[i] * om[(i, j)] * q.x[j];
                    }
                }
                a + b + c
            })
            .collect();
        Ok(GroupPoint { x, z })
    }

    pub fn inverse(&self, p: &GroupPoint) -> GroupPoint {
        GroupPoint {
            x: p.x.iter().map(|v| -v).collect(),
            z: p.z.iter().map(|v| -v).collect(),
        }
    }

    /// q -> g q written as u -> A u + t on R^{2n+r+s}.
    pub fn left_translation_affine(&self, g: &GroupPoint) -> Result<(DMatrix<f64>, Vec<f64>)> {
        self.check_point(g)?;
        let s = self.sig();
        let (dv, d) = (s.dim_v(), s.dim());
        let mut a = DMatrix::identity(d, d);
        for (k, om) in self.omega_gen.iter().enumerate() {
            for j in 0..dv {
                let mut c = 0.0;
                for i in 0..dv {
                    c += g.x[i] * om[(i, j)];
                }
                a[(dv + k, j)] = c;
            }
        }
        Ok((a, g.concat()))
    }

    /// X_j = d/dx_j + sum_{k,m} (Omega_k)_{mj} x_m d/dz_k as polynomial-coefficient fields.
    pub fn horizontal_fields(&self) -> Vec<Vec<(usize, Poly)>> {
        let s = self.sig();
        let (dv, d) = (s.dim_v(), s.dim());
        (0..dv)
            .map(|j| {
                let mut f = vec![(j, Poly::one(d))];
                for (k, om) in self.omega_gen.iter().enumerate() {
                    let coeffs: Vec<C64> = (0..d)
                        .map(|m| if m < dv { C64::new(om[(m, j)], 0.0) } else { C64::new(0.0, 0.0) })
                        .collect();
                    let c = Poly::linear(&coeffs, C64::new(0.0, 0.0));
                    if !c.is_zero() {
                        f.push((dv + k, c));
                    }
                }
                f
            })
            .collect()
    }

    /// Delta_{r,s} = sum_{j<n} X_j^2 - sum_{j>=n} X_j^2, applied exactly.
    pub fn apply_delta_rs(&self, phi: &GaussPoly) -> Result<GaussPoly> {
        let s = self.sig();
        if phi.dim != s.dim() {
            return Err(Error::DimensionMismatch { expected: s.dim(), got: phi.dim });
        }
        let mut acc = Poly::zero(phi.dim);
        for (j, f) in self.horizontal_fields().iter().enumerate() {
            let twice = phi.vector_field(f).vector_field(f);
            let sign = if j < s.n { 1.0 } else { -1.0 };
            acc.add_assign(&twice.poly.scale(C64::new(sign, 0.0)));
        }
        Ok(GaussPoly { poly: acc, ..phi.clone() })
    }

    pub fn apply_delta_rs_mixture(&self, phi: &GaussMixture) -> Result<GaussMixture> {
        phi.try_map(|g| self.apply_delta_rs(g))
    }

    /// G_{r,s} psi = -P(xi) psi + (<eta,eta>/4) L psi + i xi^T rho(eta)^T grad_xi psi,
    /// from the xi-jet of psi at fixed eta.
    pub fn apply_g_rs(&self, jet: &Jet, xi: &[f64], eta: &[f64]) -> Result<C64> {
        let s = self.sig();
        let dv = s.dim_v();
        if xi.len() != dv || jet.grad.len() < dv || jet.hess_diag.len() < dv {
            return Err(Error::DimensionMismatch { expected: dv, got: xi.len() });
        }
        let r = self.rho(eta)?;
        let m = s.form(eta);
        let mut lap = C64::new(0.0, 0.0);
        for j in 0..s.n {
            lap += jet.hess_diag[j] - jet.hess_diag[j + s.n];
        }
        // xi^T rho^T grad = (rho xi) . grad
        let mut first = C64::new(0.0, 0.0);
        for i in 0..dv {
            let mut rx = 0.0;
            for j in 0..dv {
                rx += r[(i, j)] * xi[j];
            }
            first += jet.grad[i] * rx;
        }
        Ok(-p_form(xi) * jet.value + lap * (m / 4.0) + Complex64::i() * first)
    }

    /// Closed form flows: [Omega tau]^2 = [tau Omega]^2 = -(<eta,eta>/4) I.
    pub fn exp_flow(&self, eta: &[f64], t: f64, side: FlowSide) -> Result<DMatrix<f64>> {
        let om = self.omega(eta)?;
        let tau = &self.module.tau;
        let x = match side {
            FlowSide::Right => &om * tau,
            FlowSide::Left => tau * &om,
        };
        let d = x.nrows();
        let id = DMatrix::<f64>::identity(d, d);
        let m = self.sig().form(eta);
        Ok(if m > 0.0 {
            let w = m.sqrt() / 2.0;
            id * (w * t).cos() + x * ((w * t).sin() / w)
        } else if m < 0.0 {
            let w = (-m).sqrt() / 2.0;
            id * (w * t).cosh() + x * ((w * t).sinh() / w)
        } else {
            id + x * t
        })
    }
}

/// Jet of a test function in the first `k` coordinates at `u`.
pub fn jet_of(phi: &GaussMixture, u: &[f64], k: usize) -> Jet {
    let mut value = C64::new(0.0, 0.0);
    let mut grad = vec![C64::new(0.0, 0.0); k];
    let mut hess = vec![C64::new(0.0, 0.0); k];
    for g in &phi.terms {
        let e = g.exponent(u).exp();
        value += g.poly.eval(u) * e;
        for j in 0..k {
            let d1 = g.deriv_poly(j);
            grad[j] += d1.eval(u) * e;
            let d2 = GaussPoly { poly: d1, ..g.clone() }.deriv_poly(j);
            hess[j] += d2.eval(u) * e;
        }
    }
    Jet { value, grad, hess_diag: hess }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn heis() -> GroupStructure {
        GroupStructure::from_signature(Signature::new(0, 1, 1)).unwrap()
    }

    #[test]
    fn heisenberg_omega() {
        let g = heis();
        let o = g.omega(&[1.0]).unwrap();
        assert_eq!(o, DMatrix::from_row_slice(2, 2, &[0.0, 0.5, -0.5, 0.0]));
        assert_eq!(g.omega(&[0.0]).unwrap(), DMatrix::zeros(2, 2));
        // X_1 = d/dx1 - (x2/2) d/dz
        let f = &g.horizontal_fields()[0];
        assert_eq!(f.len(), 2);
        assert_eq!(f[1].1.eval(&[0.0, 1.0, 0.0]), C64::new(-0.5, 0.0));
    }

    #[test]
    fn heisenberg_product() {
        let g = heis();
        let p = GroupPoint::new(vec![1.0, 0.0], vec![0.0]);
        let q = GroupPoint::new(vec![0.0, 1.0], vec![0.0]);
        let r = g.group_mul(&p, &q).unwrap();
        assert_eq!(r, GroupPoint::new(vec![1.0, 1.0], vec![0.5]));
        let id = GroupPoint::new(vec![0.0, 0.0], vec![0.0]);
        assert_eq!(g.group_mul(&p, &id).unwrap(), p);
        let pi = g.inverse(&p);
        assert_eq!(g.group_mul(&p, &pi).unwrap(), id);
    }

    #[test]
    fn dilation_rejects_nonpositive() {
        let p = GroupPoint::new(vec![1.0, 2.0], vec![3.0]);
        assert!(dilate(0.0, &p).is_err());
        assert_eq!(dilate(1.0, &p).unwrap(), p);
    }

    #[test]
    fn n11_bracket_table() {
        // [X_i, X_j] = 2 sum_k (Omega_k)_{ij} Z_k
        let g = GroupStructure::from_signature(Signature::new(1, 1, 2)).unwrap();
        let br = |i: usize, j: usize| -> Vec<f64> {
            g.omega_gen.iter().map(|o| 2.0 * o[(i, j)]).collect()
        };
        assert_eq!(br(0, 1), vec![1.0, 0.0]);
        assert_eq!(br(0, 3), vec![0.0, 1.0]);
        assert_eq!(br(1, 2), vec![0.0, -1.0]);
        assert_eq!(br(2, 3), vec![1.0, 0.0]);
        assert_eq!(br(0, 2), vec![0.0, 0.0]);
        assert_eq!(br(1, 3), vec![0.0, 0.0]);
    }

    #[test]
    fn flows_at_zero_and_period() {
        let g = GroupStructure::from_signature(Signature::new(1, 1, 2)).unwrap();
        let eta = [2.0, 1.0];
        let id = DMatrix::<f64>::identity(4, 4);
        assert_eq!(g.exp_flow(&eta, 0.0, FlowSide::Right).unwrap(), id);
        let q = 4.0 * std::f64::consts::PI / 3f64.sqrt();
        let e = g.exp_flow(&eta, q, FlowSide::Right).unwrap();
        assert!((e - id).amax() < 1e-12);
    }
}
