//! Test functions of the form p(u) exp(-1/2 u^T M u + b^T u + c).
//!
//! Fourier convention: F f(xi) = (2 pi)^{-d/2} int f(u) e^{-i <u, xi>} du.
//! Test functions built by the public constructors have real symmetric
//! positive definite M. Partial Fourier transforms of Gaussians whose
//! quadratic form couples transformed and untouched variables produce a
//! complex symmetric M with positive definite real part, so that case is
//! carried internally as well.

use std::collections::HashMap;
use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::poly::{Multi, Poly, C64};
use crate::quad;

const ZERO: C64 = C64::new(0.0, 0.0);
const ONE: C64 = C64::new(1.0, 0.0);

fn cplx(m: &DMatrix<f64>) -> DMatrix<C64> {
    m.map(|x| C64::new(x, 0.0))
}

/// log det(M)^{-1/2} on the branch continuous from real SPD matrices:
/// det(A)^{-1/2} prod_k (1 + i s_k)^{-1/2}, A = Re M, s_k eigenvalues of
/// A^{-1/2} (Im M) A^{-1/2}, principal roots.
pub fn log_det_inv_sqrt(m: &DMatrix<C64>) -> Result<C64> {
    let a = m.map(|z| z.re);
    let b = m.map(|z| z.im);
    let ch = a.cholesky().ok_or(Error::NonSPDQuadraticForm)?;
    let l = ch.l();
    let mut out = C64::new(-l.diagonal().iter().map(|x| x.ln()).sum::<f64>(), 0.0);
    if b.iter().any(|x| *x != 0.0) {
        let li = l.try_inverse().ok_or(Error::NonSPDQuadraticForm)?;
        let c = &li * b * li.transpose();
        let c = (&c + c.transpose()) * 0.5;
        for s in c.symmetric_eigenvalues().iter() {
            out -= 0.5 * C64::new(1.0, *s).ln();
        }
    }
    Ok(out)
}

fn sub(m: &DMatrix<C64>, rows: &[usize], cols: &[usize]) -> DMatrix<C64> {
    DMatrix::from_fn(rows.len(), cols.len(), |i, j| m[(rows[i], cols[j])])
}

#[derive(Debug, Clone, PartialEq)]
pub struct GaussPoly {
    pub dim: usize,
    pub quad: DMatrix<C64>,
    pub lin: DVector<C64>,
    pub log_c: C64,
    pub poly: Poly,
}

impl GaussPoly {
    /// exp(-1/2 (u - shift)^T A (u - shift)).
    pub fn gaussian(a: &DMatrix<f64>, shift: &[f64]) -> Result<Self> {
        let d = a.nrows();
        if a.ncols() != d {
            return Err(Error::DimensionMismatch { expected: d, got: a.ncols() });
        }
        if shift.len() != d {
            return Err(Error::DimensionMismatch { expected: d, got: shift.len() });
        }
        let sym = (a + a.transpose()) * 0.5;
        if (a - &sym).amax() > 1e-14 * a.amax().max(1.0) || sym.clone().cholesky().is_none() {
            return Err(Error::NonSPDQuadraticForm);
        }
        let s = DVector::from_column_slice(shift);
        let as_ = &sym * &s;
        Ok(Self {
            dim: d,
            quad: cplx(&sym),
            lin: as_.map(|x| C64::new(x, 0.0)),
            log_c: C64::new(-0.5 * s.dot(&as_), 0.0),
            poly: Poly::one(d),
        })
    }

    /// exp(-|u|^2 / (2 sigma^2)) centred at `shift`.
    pub fn isotropic(sigma: f64, shift: &[f64]) -> Self {
        let d = shift.len();
        let a = DMatrix::identity(d, d) / (sigma * sigma);
        Self::gaussian(&a, shift).expect("isotropic Gaussian is SPD")
    }

    /// Fully general constructor; Re M must be positive definite.
    pub fn from_parts(quad: DMatrix<C64>, lin: DVector<C64>, log_c: C64, poly: Poly) -> Result<Self> {
        let d = quad.nrows();
        if quad.ncols() != d || lin.len() != d || poly.dim != d {
            return Err(Error::DimensionMismatch { expected: d, got: lin.len() });
        }
        log_det_inv_sqrt(&quad)?;
        Ok(Self { dim: d, quad, lin, log_c, poly })
    }

    pub fn is_real_quad(&self) -> bool {
        self.quad.iter().all(|z| z.im == 0.0)
    }

    pub fn is_zero(&self) -> bool {
        self.poly.is_zero()
    }

    fn check(&self, u: &[f64]) -> Result<()> {
        if u.len() != self.dim {
            return Err(Error::DimensionMismatch { expected: self.dim, got: u.len() });
        }
        Ok(())
    }

    pub fn exponent(&self, u: &[f64]) -> C64 {
        let d = self.dim;
        let mut q = ZERO;
        for i in 0..d {
            let mut row = ZERO;
            for j in 0..d {
                row += self.quad[(i, j)] * u[j];
            }
            q += row * u[i];
        }
        let mut l = ZERO;
        for i in 0..d {
            l += self.lin[i] * u[i];
        }
        -0.5 * q + l + self.log_c
    }

    pub fn evaluate(&self, u: &[f64]) -> C64 {
        if self.poly.is_zero() {
            return ZERO;
        }
        self.poly.eval(u) * self.exponent(u).exp()
    }

    pub fn evaluate_checked(&self, u: &[f64]) -> Result<C64> {
        self.check(u)?;
        Ok(self.evaluate(u))
    }

    fn with_poly(&self, poly: Poly) -> Self {
        Self { poly, ..self.clone() }
    }

    pub fn scale(&self, s: C64) -> Self {
        self.with_poly(self.poly.scale(s))
    }

    /// d/du_j of the exponent, b_j - (M u)_j.
    pub fn exponent_grad(&self, j: usize) -> Poly {
        let row: Vec<C64> = (0..self.dim).map(|k| -self.quad[(j, k)]).collect();
        Poly::linear(&row, self.lin[j])
    }

    /// Polynomial q with d/du_j (p e^Q) = q e^Q.
    pub fn deriv_poly(&self, j: usize) -> Poly {
        self.poly.deriv(j).add(&self.poly.mul(&self.exponent_grad(j)))
    }

    pub fn differentiate(&self, j: usize) -> Result<Self> {
        if j >= self.dim {
            return Err(Error::DimensionMismatch { expected: self.dim, got: j + 1 });
        }
        Ok(self.with_poly(self.deriv_poly(j)))
    }

    /// Applies sum_i c_i(u) d/du_i for polynomial coefficients c_i.
    pub fn vector_field(&self, field: &[(usize, Poly)]) -> Self {
        let mut p = Poly::zero(self.dim);
        for (i, c) in field {
            p.add_assign(&c.mul(&self.deriv_poly(*i)));
        }
        self.with_poly(p)
    }

    pub fn mul_poly(&self, q: &Poly) -> Self {
        self.with_poly(self.poly.mul(q))
    }

    pub fn multiply_monomial(&self, alpha: &[u8]) -> Result<Self> {
        if alpha.len() != self.dim {
            return Err(Error::DimensionMismatch { expected: self.dim, got: alpha.len() });
        }
        Ok(self.mul_poly(&Poly::monomial(self.dim, alpha, ONE)))
    }

    fn second(&self, j: usize) -> Poly {
        let once = self.with_poly(self.deriv_poly(j));
        once.deriv_poly(j)
    }

    /// Sum of second derivatives weighted by `signs` (None skips an axis).
    pub fn weighted_laplacian(&self, signs: &[f64]) -> Self {
        let mut p = Poly::zero(self.dim);
        for (j, &s) in signs.iter().enumerate() {
            if s != 0.0 {
                p.add_assign(&self.second(j).scale(C64::new(s, 0.0)));
            }
        }
        self.with_poly(p)
    }

    pub fn laplacian(&self) -> Self {
        self.weighted_laplacian(&vec![1.0; self.dim])
    }

    pub fn laplacian_power(&self, l: usize) -> Self {
        (0..l).fold(self.clone(), |f, _| f.laplacian())
    }

    /// Flat operator L = sum_{j<n} d_j^2 - d_{j+n}^2 on the first 2n axes.
    pub fn ultra_laplacian(&self, n: usize) -> Self {
        let mut s = vec![0.0; self.dim];
        for j in 0..n {
            s[j] = 1.0;
            s[j + n] = -1.0;
        }
        self.weighted_laplacian(&s)
    }

    /// u -> phi(A u + t).
    pub fn precompose_affine(&self, a: &DMatrix<f64>, t: &[f64]) -> Result<Self> {
        let d = self.dim;
        if a.nrows() != d || a.ncols() != d || t.len() != d {
            return Err(Error::DimensionMismatch { expected: d, got: a.nrows() });
        }
        let det = a.determinant();
        if !(det.abs() > 1e-13 * a.amax().powi(d as i32).max(f64::MIN_POSITIVE)) {
            return Err(Error::SingularAffineMap);
        }
        let ac = cplx(a);
        let tv = DVector::from_iterator(d, t.iter().map(|x| C64::new(*x, 0.0)));
        let mt = &self.quad * &tv;
        let quad = ac.transpose() * &self.quad * &ac;
        let quad = (&quad + quad.transpose()) * C64::new(0.5, 0.0);
        let lin = ac.transpose() * (&self.lin - &mt);
        let log_c = self.log_c + self.lin.dot(&tv) - 0.5 * tv.dot(&mt);
        let tc: Vec<C64> = tv.iter().copied().collect();
        Ok(Self { dim: d, quad, lin, log_c, poly: self.poly.compose_affine(&ac, &tc) })
    }

    /// Fixes coordinates `fixed` and returns the function of the remaining ones.
    pub fn slice(&self, fixed: &[(usize, f64)]) -> Self {
        let keep: Vec<usize> = (0..self.dim)
            .filter(|j| !fixed.iter().any(|(f, _)| f == j))
            .collect();
        let fi: Vec<usize> = fixed.iter().map(|x| x.0).collect();
        let v = DVector::from_iterator(fi.len(), fixed.iter().map(|x| C64::new(x.1, 0.0)));
        let mkf = sub(&self.quad, &keep, &fi);
        let mff = sub(&self.quad, &fi, &fi);
        let bf = DVector::from_iterator(fi.len(), fi.iter().map(|&i| self.lin[i]));
        let bk = DVector::from_iterator(keep.len(), keep.iter().map(|&i| self.lin[i]));
        let lin = bk - &mkf * &v;
        let log_c = self.log_c + bf.dot(&v) - 0.5 * v.dot(&(&mff * &v));
        Self {
            dim: keep.len(),
            quad: sub(&self.quad, &keep, &keep),
            lin,
            log_c,
            poly: self.poly.substitute(fixed),
        }
    }

    /// Block-diagonal product f(u) g(w) on the concatenated space.
    pub fn tensor(&self, o: &GaussPoly) -> Self {
        let (d1, d2) = (self.dim, o.dim);
        let d = d1 + d2;
        let mut quad = DMatrix::from_element(d, d, ZERO);
        quad.view_mut((0, 0), (d1, d1)).copy_from(&self.quad);
        quad.view_mut((d1, d1), (d2, d2)).copy_from(&o.quad);
        let lin = DVector::from_iterator(d, self.lin.iter().chain(o.lin.iter()).copied());
        let m1: Vec<usize> = (0..d1).collect();
        let m2: Vec<usize> = (d1..d).collect();
        let poly = self.poly.embed(d, &m1).mul(&o.poly.embed(d, &m2));
        Self { dim: d, quad, lin, log_c: self.log_c + o.log_c, poly }
    }

    /// Partial transform over `axes` with kernel (2 pi)^{-|S|/2} e^{sign i <u_S, xi_S>}.
    /// sign = -1 is the forward transform, +1 the inverse.
    pub fn fourier_axes(&self, axes: &[usize], sign: f64) -> Result<Self> {
        let d = self.dim;
        let mut s_ax: Vec<usize> = axes.to_vec();
        s_ax.sort_unstable();
        s_ax.dedup();
        if s_ax.iter().any(|&a| a >= d) {
            return Err(Error::DimensionMismatch { expected: d, got: s_ax.len() });
        }
        if s_ax.is_empty() {
            return Ok(self.clone());
        }
        let k_ax: Vec<usize> = (0..d).filter(|j| !s_ax.contains(j)).collect();
        let mss = sub(&self.quad, &s_ax, &s_ax);
        let ld = log_det_inv_sqrt(&mss)?;
        let nmat = mss.try_inverse().ok_or(Error::NonSPDQuadraticForm)?;
        let nmat = (&nmat + nmat.transpose()) * C64::new(0.5, 0.0);
        let mks = sub(&self.quad, &k_ax, &s_ax);
        let si = C64::new(0.0, sign);
        let mksn = &mks * &nmat;
        let bs = DVector::from_iterator(s_ax.len(), s_ax.iter().map(|&i| self.lin[i]));
        let nbs = &nmat * &bs;

        let mut quad = DMatrix::from_element(d, d, ZERO);
        let corr = &mksn * mks.transpose();
        for (a, &i) in k_ax.iter().enumerate() {
            for (b, &j) in k_ax.iter().enumerate() {
                quad[(i, j)] = self.quad[(i, j)] - corr[(a, b)];
            }
            for (b, &j) in s_ax.iter().enumerate() {
                quad[(i, j)] = si * mksn[(a, b)];
                quad[(j, i)] = quad[(i, j)];
            }
        }
        for (a, &i) in s_ax.iter().enumerate() {
            for (b, &j) in s_ax.iter().enumerate() {
                quad[(i, j)] = nmat[(a, b)];
            }
        }
        let mut lin = DVector::from_element(d, ZERO);
        let shift_k = &mks * &nbs;
        for (a, &i) in k_ax.iter().enumerate() {
            lin[i] = self.lin[i] - shift_k[a];
        }
        for (a, &i) in s_ax.iter().enumerate() {
            lin[i] = si * nbs[a];
        }
        let log_c = self.log_c + 0.5 * bs.dot(&nbs) + ld;
        // Completing the square, u_S = N(b_S - M_SK u_K + sign i xi) + W with
        // W ~ N(0, N), so the polynomial becomes E[p(u_K, mean + W)], which is
        // the heat operator exp(1/2 d_S^T N d_S) applied to p, then the mean.
        let heated = heat(&self.poly, &s_ax, &nmat);
        let mut w = DMatrix::from_element(d, d, ZERO);
        let mut t = vec![ZERO; d];
        for &i in &k_ax {
            w[(i, i)] = ONE;
        }
        let nmsk = mksn.transpose();
        for (a, &i) in s_ax.iter().enumerate() {
            for (b, &j) in k_ax.iter().enumerate() {
                w[(i, j)] = -nmsk[(a, b)];
            }
            for (b, &j) in s_ax.iter().enumerate() {
                w[(i, j)] = si * nmat[(a, b)];
            }
            t[i] = nbs[a];
        }
        let poly = heated.compose_affine(&w, &t);
        let out = Self { dim: d, quad, lin, log_c, poly };
        Ok(out)
    }

    pub fn fourier(&self) -> Result<Self> {
        let all: Vec<usize> = (0..self.dim).collect();
        self.fourier_axes(&all, -1.0)
    }

    pub fn inverse_fourier(&self) -> Result<Self> {
        let all: Vec<usize> = (0..self.dim).collect();
        self.fourier_axes(&all, 1.0)
    }

    /// Exact integral over R^d by Gaussian moments.
    pub fn integrate(&self) -> Result<C64> {
        if self.poly.is_zero() {
            return Ok(ZERO);
        }
        let d = self.dim;
        let ld = log_det_inv_sqrt(&self.quad)?;
        let cov = self.quad.clone().try_inverse().ok_or(Error::NonSPDQuadraticForm)?;
        let mean = &cov * &self.lin;
        let logp = self.log_c + 0.5 * self.lin.dot(&mean) + ld
            + C64::new(0.5 * d as f64 * (2.0 * PI).ln(), 0.0);
        let mut memo: HashMap<Multi, C64> = HashMap::new();
        let mut e = ZERO;
        for (a, c) in &self.poly.terms {
            e += c * moment(a, &mean, &cov, &mut memo);
        }
        Ok(e * logp.exp())
    }

    /// Integral over the listed axes, leaving a function of the others.
    pub fn integrate_axes(&self, axes: &[usize]) -> Result<Self> {
        let t = self.fourier_axes(axes, -1.0)?;
        let fixed: Vec<(usize, f64)> = axes.iter().map(|&a| (a, 0.0)).collect();
        let f = (2.0 * PI).powf(axes.len() as f64 / 2.0);
        Ok(t.slice(&fixed).scale(C64::new(f, 0.0)))
    }

    /// L1 norm to roughly relative 1e-8.
    pub fn l1_norm(&self) -> f64 {
        self.l1_norm_tol(1e-9)
    }

    /// L1 norm by nested adaptive Gauss-Legendre in whitened coordinates;
    /// the innermost axis is split at the real roots of the polynomial.
    pub fn l1_norm_tol(&self, tol: f64) -> f64 {
        if self.poly.is_zero() {
            return 0.0;
        }
        let d = self.dim;
        let a = self.quad.map(|z| z.re);
        let ch = a.clone().cholesky().expect("Re M is SPD");
        let l = ch.l();
        let ai = ch.inverse();
        let rb = self.lin.map(|z| z.re);
        let mu = &ai * &rb;
        let c0 = self.log_c.re + 0.5 * rb.dot(&mu) - l.diagonal().iter().map(|x| x.ln()).sum::<f64>();
        // u = mu + L^{-T} y, the exponent's real part becomes -|y|^2/2 + const.
        let lit = l.try_inverse().unwrap().transpose();
        let q = self.poly.compose_affine(&cplx(&lit), &mu.iter().map(|x| C64::new(*x, 0.0)).collect::<Vec<_>>());
        // The imaginary part of M and b only contributes a phase.
        let q = q.prune(1e-15);
        let scale = q.terms.values().fold(0.0f64, |m, c| m.max(c.norm()));
        let r = 8.6;
        let mut head = Vec::with_capacity(d);
        let v = l1_nested(&q, d, &mut head, r, tol * scale);
        v * c0.exp()
    }
}

/// exp(1/2 sum_{i,j in axes} N_ij d_i d_j) p.
fn heat(p: &Poly, axes: &[usize], nmat: &DMatrix<C64>) -> Poly {
    let mut total = p.clone();
    let mut term = p.clone();
    let mut k = 1.0;
    loop {
        let mut next = Poly::zero(p.dim);
        for (a, &i) in axes.iter().enumerate() {
            let di = term.deriv(i);
            if di.is_zero() {
                continue;
            }
            for (b, &j) in axes.iter().enumerate() {
                let dij = di.deriv(j);
                if !dij.is_zero() {
                    next.add_assign(&dij.scale(nmat[(a, b)] * 0.5));
                }
            }
        }
        if next.is_zero() {
            return total;
        }
        term = next.scale(C64::new(1.0 / k, 0.0));
        total.add_assign(&term);
        k += 1.0;
    }
}

fn moment(a: &[u8], mean: &DVector<C64>, cov: &DMatrix<C64>, memo: &mut HashMap<Multi, C64>) -> C64 {
    let Some(j) = a.iter().position(|&e| e > 0) else {
        return ONE;
    };
    if let Some(v) = memo.get(a) {
        return *v;
    }
    let mut b = a.to_vec();
    b[j] -= 1;
    let mut v = mean[j] * moment(&b, mean, cov, memo);
    for k in 0..a.len() {
        if b[k] > 0 {
            let mut c = b.clone();
            c[k] -= 1;
            v += cov[(j, k)] * b[k] as f64 * moment(&c, mean, cov, memo);
        }
    }
    memo.insert(a.to_vec(), v);
    v
}

fn real_roots(c: &[f64]) -> Vec<f64> {
    let mut deg = c.len() - 1;
    let mx = c.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    while deg > 0 && c[deg].abs() <= 1e-14 * mx {
        deg -= 1;
    }
    if deg == 0 {
        return vec![];
    }
    let mut comp = DMatrix::<f64>::zeros(deg, deg);
    for i in 1..deg {
        comp[(i, i - 1)] = 1.0;
    }
    for i in 0..deg {
        comp[(i, deg - 1)] = -c[i] / c[deg];
    }
    comp.complex_eigenvalues()
        .iter()
        .filter(|z| z.im.abs() <= 1e-9 * (1.0 + z.re.abs()))
        .map(|z| z.re)
        .collect()
}

fn l1_line(coef: &[C64], r: f64) -> f64 {
    let is_real = coef.iter().all(|z| z.im.abs() <= 1e-14 * z.norm().max(1e-300));
    let mut br = vec![-r, r];
    if is_real {
        let re: Vec<f64> = coef.iter().map(|z| z.re).collect();
        br.extend(real_roots(&re).into_iter().filter(|x| x.abs() < r));
    }
    let mut k = -r.floor();
    while k < r {
        br.push(k);
        k += 1.0;
    }
    br.sort_by(|a, b| a.total_cmp(b));
    br.dedup_by(|a, b| (*a - *b).abs() < 1e-12);
    let mut s = 0.0;
    for w in br.windows(2) {
        for (y, wt) in quad::legendre_on(12, w[0], w[1]) {
            let mut p = ZERO;
            for c in coef.iter().rev() {
                p = p * y + c;
            }
            s += wt * p.norm() * (-0.5 * y * y).exp();
        }
    }
    s
}

fn l1_nested(q: &Poly, d: usize, head: &mut Vec<f64>, r: f64, tol: f64) -> f64 {
    if head.len() + 1 == d {
        let g: f64 = head.iter().map(|x| x * x).sum();
        return l1_line(&q.last_axis_coeffs(head), r) * (-0.5 * g).exp();
    }
    let mut f = |x: f64| {
        head.push(x);
        let v = l1_nested(q, d, head, r, tol);
        head.pop();
        v
    };
    adaptive_gl(&mut f, -r, r, tol, 0)
}

fn adaptive_gl(f: &mut dyn FnMut(f64) -> f64, a: f64, b: f64, tol: f64, depth: usize) -> f64 {
    let coarse: f64 = quad::legendre_on(6, a, b).into_iter().map(|(x, w)| w * f(x)).sum();
    let fine: f64 = quad::legendre_on(12, a, b).into_iter().map(|(x, w)| w * f(x)).sum();
    if (fine - coarse).abs() <= tol.max(1e-300) || depth >= 18 {
        return fine;
    }
    let m = 0.5 * (a + b);
    adaptive_gl(f, a, m, 0.5 * tol, depth + 1) + adaptive_gl(f, m, b, 0.5 * tol, depth + 1)
}

/// Flat copy of a GaussPoly for repeated pointwise evaluation.
#[derive(Debug, Clone)]
pub struct CompiledGauss {
    dim: usize,
    quad: Vec<C64>,
    lin: Vec<C64>,
    log_c: C64,
    exps: Vec<u8>,
    coefs: Vec<C64>,
    maxdeg: usize,
}

impl CompiledGauss {
    pub fn new(g: &GaussPoly) -> Self {
        let d = g.dim;
        let mut exps = Vec::with_capacity(g.poly.terms.len() * d);
        let mut coefs = Vec::with_capacity(g.poly.terms.len());
        let mut maxdeg = 0;
        for (a, c) in &g.poly.terms {
            exps.extend_from_slice(a);
            coefs.push(*c);
            maxdeg = maxdeg.max(a.iter().copied().max().unwrap_or(0) as usize);
        }
        Self {
            dim: d,
            quad: g.quad.transpose().iter().copied().collect(),
            lin: g.lin.iter().copied().collect(),
            log_c: g.log_c,
            exps,
            coefs,
            maxdeg,
        }
    }

    pub fn eval(&self, u: &[f64]) -> C64 {
        let d = self.dim;
        let mut e = self.log_c;
        for i in 0..d {
            let mut row = ZERO;
            for j in 0..d {
                row += self.quad[i * d + j] * u[j];
            }
            e += (self.lin[i] - 0.5 * row) * u[i];
        }
        // powers u_j^k in a fixed-size stack buffer when small
        let stride = self.maxdeg + 1;
        let mut buf = [0.0f64; 96];
        let mut heap;
        let pw: &mut [f64] = if d * stride <= buf.len() {
            &mut buf[..d * stride]
        } else {
            heap = vec![0.0; d * stride];
            &mut heap
        };
        for j in 0..d {
            let mut x = 1.0;
            for k in 0..stride {
                pw[j * stride + k] = x;
                x *= u[j];
            }
        }
        let mut p = ZERO;
        for (t, c) in self.coefs.iter().enumerate() {
            let a = &self.exps[t * d..(t + 1) * d];
            let mut m = 1.0;
            for j in 0..d {
                m *= pw[j * stride + a[j] as usize];
            }
            p += c * m;
        }
        p * e.exp()
    }
}

/// Finite sums of GaussPoly terms on a common space.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussMixture {
    pub dim: usize,
    pub terms: Vec<GaussPoly>,
}

impl GaussMixture {
    pub fn new(dim: usize) -> Self {
        Self { dim, terms: Vec::new() }
    }

    pub fn single(g: GaussPoly) -> Self {
        Self { dim: g.dim, terms: vec![g] }
    }

    pub fn push(&mut self, g: GaussPoly) -> Result<()> {
        if g.dim != self.dim {
            return Err(Error::DimensionMismatch { expected: self.dim, got: g.dim });
        }
        if !g.is_zero() {
            self.terms.push(g);
        }
        Ok(())
    }

    pub fn add(&self, o: &GaussMixture) -> Self {
        let mut t = self.terms.clone();
        t.extend(o.terms.iter().cloned());
        Self { dim: self.dim, terms: t }
    }

    pub fn evaluate(&self, u: &[f64]) -> C64 {
        self.terms.iter().map(|g| g.evaluate(u)).sum()
    }

    pub fn map(&self, f: impl Fn(&GaussPoly) -> GaussPoly) -> Self {
        Self { dim: self.dim, terms: self.terms.iter().map(f).collect() }
    }

    pub fn try_map(&self, f: impl Fn(&GaussPoly) -> Result<GaussPoly>) -> Result<Self> {
        let terms = self.terms.iter().map(f).collect::<Result<Vec<_>>>()?;
        let dim = terms.first().map_or(self.dim, |g| g.dim);
        Ok(Self { dim, terms })
    }

    pub fn scale(&self, s: C64) -> Self {
        self.map(|g| g.scale(s))
    }

    pub fn fourier(&self) -> Result<Self> {
        self.try_map(|g| g.fourier())
    }

    pub fn inverse_fourier(&self) -> Result<Self> {
        self.try_map(|g| g.inverse_fourier())
    }

    pub fn differentiate(&self, j: usize) -> Result<Self> {
        self.try_map(|g| g.differentiate(j))
    }

    pub fn integrate(&self) -> Result<C64> {
        self.terms.iter().map(|g| g.integrate()).sum()
    }
}

/// JSON form of a real test function: p(u - shift) exp(-1/2 (u-shift)^T A (u-shift)).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TestFnSpec {
    pub dim: usize,
    pub quad: Vec<Vec<f64>>,
    pub shift: Vec<f64>,
    /// Entries [multi-index, re, im].
    pub poly: Vec<(Vec<u8>, f64, f64)>,
}

impl TestFnSpec {
    pub fn build(&self) -> Result<GaussPoly> {
        let d = self.dim;
        if self.quad.len() != d || self.quad.iter().any(|r| r.len() != d) {
            return Err(Error::DimensionMismatch { expected: d, got: self.quad.len() });
        }
        let a = DMatrix::from_fn(d, d, |i, j| self.quad[i][j]);
        let g = GaussPoly::gaussian(&a, &self.shift)?;
        let mut p = Poly::zero(d);
        for (m, re, im) in &self.poly {
            if m.len() != d {
                return Err(Error::DimensionMismatch { expected: d, got: m.len() });
            }
            p.add_assign(&Poly::monomial(d, m, C64::new(*re, *im)));
        }
        let t: Vec<C64> = self.shift.iter().map(|x| C64::new(-x, 0.0)).collect();
        let p = p.compose_affine(&DMatrix::identity(d, d), &t);
        Ok(g.mul_poly(&p))
    }
}

/// Reproducible probe: Gaussian with a random SPD form and centre, times
/// 1 + (0.5 + 0.2i) u_0 - 0.3 u_1 u_{d-1}.
pub fn probe(dim: usize, seed: u64) -> GaussPoly {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let b = DMatrix::from_fn(dim, dim, |_, _| rng.random_range(-0.3..0.3));
    let a = &b * b.transpose() + DMatrix::<f64>::identity(dim, dim);
    let shift: Vec<f64> = (0..dim).map(|_| rng.random_range(-0.5..0.5)).collect();
    let mut p = Poly::one(dim);
    p.add_assign(&Poly::var(dim, 0).scale(C64::new(0.5, 0.2)));
    if dim > 1 {
        p.add_assign(&Poly::var(dim, dim - 1).mul(&Poly::var(dim, 1)).scale(C64::new(-0.3, 0.0)));
    }
    GaussPoly::gaussian(&a, &shift).expect("probe form is SPD").mul_poly(&p)
}

/// |x'|^{2k} exp(-|x'|^2/2 - |x''|^2/(2b^2) - |z - z0|^2/(2c^2)) on R^{2n} x R^s,
/// with x' the first n and x'' the last n coordinates of x. For large k and
/// small b, c the mass sits where P(x) is near 2k and z near z0.
pub fn shell(n: usize, s: usize, k: usize, b: f64, c: f64, z0: f64) -> GaussPoly {
    let d = 2 * n + s;
    let diag: Vec<f64> = (0..d)
        .map(|i| if i < n { 1.0 } else if i < 2 * n { 1.0 / (b * b) } else { 1.0 / (c * c) })
        .collect();
    let a = DMatrix::from_diagonal(&DVector::from_vec(diag));
    let mut shift = vec![0.0; d];
    for v in shift.iter_mut().skip(2 * n) {
        *v = z0;
    }
    let mut r2 = Poly::zero(d);
    for j in 0..n {
        r2.add_assign(&Poly::var(d, j).mul(&Poly::var(d, j)));
    }
    let mut p = Poly::one(d);
    for _ in 0..k {
        p = p.mul(&r2);
    }
    GaussPoly::gaussian(&a, &shift).expect("diagonal form is SPD").mul_poly(&p)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn std_gauss(d: usize) -> GaussPoly {
        GaussPoly::isotropic(1.0, &vec![0.0; d])
    }

    #[test]
    fn fourier_fixed_point_and_hermite() {
        let g = std_gauss(2);
        let f = g.fourier().unwrap();
        for u in [[0.3, -1.1], [2.0, 0.5]] {
            assert!((f.evaluate(&u) - g.evaluate(&u)).norm() < 1e-14);
        }
        let h = g.multiply_monomial(&[1, 0]).unwrap().fourier().unwrap();
        let u = [0.7, -0.2];
        let want = C64::new(0.0, -0.7) * g.evaluate(&u);
        assert!((h.evaluate(&u) - want).norm() < 1e-14);
    }

    #[test]
    fn diagonal_product_formula() {
        // F exp(-sum b_j u_j^2 / 2) = prod b_j^{-1/2} exp(-sum xi_j^2 / (2 b_j))
        let b = [0.5, 2.0, 3.5];
        let a = DMatrix::from_diagonal(&DVector::from_column_slice(&b));
        let f = GaussPoly::gaussian(&a, &[0.0; 3]).unwrap().fourier().unwrap();
        let xi = [0.4, -1.3, 0.9];
        let mut want = 1.0;
        for j in 0..3 {
            want *= b[j].powf(-0.5) * (-xi[j] * xi[j] / (2.0 * b[j])).exp();
        }
        assert!((f.evaluate(&xi).re - want).abs() < 1e-12 * want);
    }

    #[test]
    fn double_fourier_reflects() {
        let a = DMatrix::from_row_slice(2, 2, &[2.0, 0.5, 0.5, 1.0]);
        let g = GaussPoly::gaussian(&a, &[0.3, -0.4])
            .unwrap()
            .mul_poly(&Poly::var(2, 0).mul(&Poly::var(2, 1)).add(&Poly::one(2)));
        let ff = g.fourier().unwrap().fourier().unwrap();
        let back = g.fourier().unwrap().inverse_fourier().unwrap();
        for u in [[0.1, 0.2], [-1.0, 0.7]] {
            assert!((ff.evaluate(&u) - g.evaluate(&[-u[0], -u[1]])).norm() < 1e-10);
            assert!((back.evaluate(&u) - g.evaluate(&u)).norm() < 1e-10);
        }
    }

    #[test]
    fn integral_of_gaussian_and_derivative() {
        let g = GaussPoly::isotropic(1.0, &[0.0]);
        assert!((g.integrate().unwrap().re - (2.0 * PI).sqrt()).abs() < 1e-14);
        let d2 = g.differentiate(0).unwrap().differentiate(0).unwrap();
        assert!(d2.integrate().unwrap().norm() < 1e-14);
        assert!((g.l1_norm() - (2.0 * PI).sqrt()).abs() < 1e-12);
    }

    #[test]
    fn derivative_of_gaussian() {
        let g = GaussPoly::isotropic(1.0, &[0.0]);
        let d = g.differentiate(0).unwrap();
        for &u in &[-1.0, 0.5, 2.0] {
            assert!((d.evaluate(&[u]).re + u * (-u * u / 2.0f64).exp()).abs() < 1e-15);
        }
    }

    #[test]
    fn rotation_precompose() {
        let a = DMatrix::from_row_slice(2, 2, &[1.5, 0.2, 0.2, 0.7]);
        let g = GaussPoly::gaussian(&a, &[0.5, 0.1]).unwrap().mul_poly(&Poly::var(2, 1));
        let t: f64 = 0.6;
        let r = DMatrix::from_row_slice(2, 2, &[t.cos(), -t.sin(), t.sin(), t.cos()]);
        let h = g.precompose_affine(&r, &[0.0, 0.0]).unwrap();
        let u = [0.3, -0.8];
        let ru = [t.cos() * u[0] - t.sin() * u[1], t.sin() * u[0] + t.cos() * u[1]];
        assert!((h.evaluate(&u) - g.evaluate(&ru)).norm() < 1e-14);
        let sing = DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 1.0, 1.0]);
        assert_eq!(g.precompose_affine(&sing, &[0.0, 0.0]), Err(Error::SingularAffineMap));
    }

    #[test]
    fn partial_fourier_of_coupled_gaussian() {
        // Check against the full transform followed by inverse transform in x.
        let a = DMatrix::from_row_slice(3, 3, &[1.0, 0.3, 0.2, 0.3, 1.2, -0.1, 0.2, -0.1, 0.8]);
        let g = GaussPoly::gaussian(&a, &[0.2, 0.0, -0.3])
            .unwrap()
            .mul_poly(&Poly::var(3, 2).add(&Poly::var(3, 0)));
        let pz = g.fourier_axes(&[2], -1.0).unwrap();
        let alt = g.fourier().unwrap().fourier_axes(&[0, 1], 1.0).unwrap();
        for u in [[0.1, -0.5, 0.7], [1.0, 0.3, -1.2]] {
            assert!((pz.evaluate(&u) - alt.evaluate(&u)).norm() < 1e-12);
        }
    }

    #[test]
    fn slice_and_integrate_axes() {
        let a = DMatrix::from_row_slice(2, 2, &[1.0, 0.4, 0.4, 2.0]);
        let g = GaussPoly::gaussian(&a, &[0.3, -0.2]).unwrap().mul_poly(&Poly::var(2, 0));
        let s = g.slice(&[(1, 0.7)]);
        assert!((s.evaluate(&[0.4]) - g.evaluate(&[0.4, 0.7])).norm() < 1e-15);
        let m = g.integrate_axes(&[1]).unwrap();
        let x = 0.25;
        let mut num = C64::new(0.0, 0.0);
        for (y, w) in quad::legendre_on(80, -10.0, 10.0) {
            num += g.evaluate(&[x, y]) * w;
        }
        assert!((m.evaluate(&[x]) - num).norm() < 1e-12);
    }

    #[test]
    fn spec_json_roundtrip() {
        let spec = TestFnSpec {
            dim: 1,
            quad: vec![vec![2.0]],
            shift: vec![0.5],
            poly: vec![(vec![1], 1.0, 0.0)],
        };
        let g = spec.build().unwrap();
        let u = 1.25;
        let want = (u - 0.5) * (-(u - 0.5f64).powi(2)).exp();
        assert!((g.evaluate(&[u]).re - want).abs() < 1e-15);
    }

    #[test]
    fn l1_of_laplacian_in_2d() {
        // ||Delta e^{-|u|^2/2}||_1 = int |r^2 - 2| e^{-r^2/2} 2 pi r dr = 8 pi / e
        let g = std_gauss(2).laplacian();
        let want = 8.0 * PI / std::f64::consts::E;
        let got = g.l1_norm();
        assert!((got - want).abs() < 1e-8 * want, "{got} vs {want}");
    }
}
