//! Closed-form integrals of p(x) exp(-1/2 x^T A x + b^T x + c) e^{-i kappa P(x)}
//! over R^{2n}, for real SPD A.
//!
//! A and tau = diag(I_n, -I_n) are diagonalised simultaneously once
//! (S^T A S = I, S^T tau S = D), after which every kappa costs one pass over
//! the monomials of p(S y) with products of one-dimensional moments.

use std::f64::consts::PI;

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::poly::{Multi, C64};
use crate::schwartz_testfn::GaussPoly;

#[derive(Debug, Clone)]
pub struct OscGauss {
    d: Vec<f64>,
    beta: Vec<C64>,
    log_pref: C64,
    terms: Vec<(Multi, C64)>,
    maxdeg: Vec<usize>,
    s: DMatrix<C64>,
    base_log: f64,
}

/// Signs of P on R^{2n}.
pub fn tau_signs(n: usize) -> Vec<f64> {
    (0..2 * n).map(|j| if j < n { 1.0 } else { -1.0 }).collect()
}

impl OscGauss {
    pub fn new(g: &GaussPoly) -> Result<Self> {
        if g.dim % 2 != 0 {
            return Err(Error::DimensionMismatch { expected: g.dim + 1, got: g.dim });
        }
        Self::with_signs(g, &tau_signs(g.dim / 2))
    }

    /// Same with an arbitrary diagonal form sum_j signs_j x_j^2 in place of P.
    pub fn with_signs(g: &GaussPoly, signs: &[f64]) -> Result<Self> {
        let dim = g.dim;
        if signs.len() != dim {
            return Err(Error::DimensionMismatch { expected: dim, got: signs.len() });
        }
        if !g.is_real_quad() {
            return Err(Error::NonSPDQuadraticForm);
        }
        let a = g.quad.map(|z| z.re);
        let ch = a.clone().cholesky().ok_or(Error::NonSPDQuadraticForm)?;
        let l = ch.l();
        let li = l.clone().try_inverse().ok_or(Error::NonSPDQuadraticForm)?;
        let tau = DMatrix::from_diagonal(&nalgebra::DVector::from_column_slice(signs));
        let c = &li * tau * li.transpose();
        let c = (&c + c.transpose()) * 0.5;
        let eig = c.symmetric_eigen();
        let s = li.transpose() * &eig.eigenvectors;
        let sc = s.map(|x| C64::new(x, 0.0));
        let beta: Vec<C64> = (0..dim)
            .map(|k| (0..dim).map(|i| sc[(i, k)] * g.lin[i]).sum())
            .collect();
        let logdet_a: f64 = 2.0 * l.diagonal().iter().map(|x| x.ln()).sum::<f64>();
        let base_log = -0.5 * logdet_a + 0.5 * dim as f64 * (2.0 * PI).ln();
        let mut out = Self {
            d: eig.eigenvalues.iter().copied().collect(),
            beta,
            log_pref: g.log_c + base_log,
            terms: Vec::new(),
            maxdeg: vec![0; dim],
            s: sc,
            base_log,
        };
        out.set_poly(g);
        Ok(out)
    }

    fn set_poly(&mut self, g: &GaussPoly) {
        let dim = self.d.len();
        let q = g.poly.compose_affine(&self.s, &vec![C64::new(0.0, 0.0); dim]);
        let mut maxdeg = vec![0usize; dim];
        self.terms = q
            .terms
            .iter()
            .map(|(a, c)| {
                for k in 0..dim {
                    maxdeg[k] = maxdeg[k].max(a[k] as usize);
                }
                (a.clone(), *c)
            })
            .collect();
        self.maxdeg = maxdeg;
    }

    /// Reuses the diagonalisation for another function with the same
    /// quadratic form (only `lin`, `log_c` and `poly` are read from `g`).
    pub fn rebind(&self, g: &GaussPoly) -> Self {
        let dim = self.d.len();
        let beta = (0..dim).map(|k| (0..dim).map(|i| self.s[(i, k)] * g.lin[i]).sum()).collect();
        let mut out = Self {
            d: self.d.clone(),
            beta,
            log_pref: g.log_c + self.base_log,
            terms: Vec::new(),
            maxdeg: Vec::new(),
            s: self.s.clone(),
            base_log: self.base_log,
        };
        out.set_poly(g);
        out
    }

    /// Generalised eigenvalues of P with respect to A.
    pub fn eigenvalues(&self) -> &[f64] {
        &self.d
    }

    /// int g(x) e^{-i kappa P(x)} dx.
    pub fn eval(&self, kappa: f64) -> C64 {
        self.eval_beta(C64::new(0.0, 2.0 * kappa))
    }

    /// int g(x) exp(-1/2 beta sum_j signs_j x_j^2) dx, for Re(1 + beta d_k) > 0.
    pub fn eval_beta(&self, beta: C64) -> C64 {
        let dim = self.d.len();
        let mut logv = self.log_pref;
        let mut moms: Vec<Vec<C64>> = Vec::with_capacity(dim);
        for k in 0..dim {
            let z = C64::new(1.0, 0.0) + beta * self.d[k];
            let inv = z.inv();
            let m = self.beta[k] * inv;
            logv += -0.5 * z.ln() + 0.5 * self.beta[k] * m;
            let mut mk = Vec::with_capacity(self.maxdeg[k] + 1);
            mk.push(C64::new(1.0, 0.0));
            if self.maxdeg[k] >= 1 {
                mk.push(m);
            }
            for e in 2..=self.maxdeg[k] {
                let v = m * mk[e - 1] + inv * (e as f64 - 1.0) * mk[e - 2];
                mk.push(v);
            }
            moms.push(mk);
        }
        let mut acc = C64::new(0.0, 0.0);
        for (a, c) in &self.terms {
            let mut t = *c;
            for (k, &e) in a.iter().enumerate() {
                if e > 0 {
                    t *= moms[k][e as usize];
                }
            }
            acc += t;
        }
        acc * logv.exp()
    }
}

/// Same integral for any class member; falls back to the general Gaussian
/// moment formula when the quadratic form is complex.
pub enum Osc {
    Fast(OscGauss),
    Slow(GaussPoly),
}

impl Osc {
    pub fn new(g: &GaussPoly) -> Result<Self> {
        if g.is_real_quad() {
            Ok(Osc::Fast(OscGauss::new(g)?))
        } else {
            Ok(Osc::Slow(g.clone()))
        }
    }

    pub fn eval(&self, kappa: f64) -> Result<C64> {
        match self {
            Osc::Fast(o) => Ok(o.eval(kappa)),
            Osc::Slow(g) => {
                let n = g.dim / 2;
                let mut h = g.clone();
                for (j, sgn) in tau_signs(n).into_iter().enumerate() {
                    h.quad[(j, j)] += C64::new(0.0, 2.0 * kappa * sgn);
                }
                h.integrate()
            }
        }
    }
}
