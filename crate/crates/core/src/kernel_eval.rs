//! Kernels and distributions attached to Delta_{0,s}.
//!
//! Every t-integral over (0, inf) is rewritten with rho = tanh t on [0, 1],
//! where cosh^{-n} t dt becomes the Jacobi weight (1 - rho^2)^{(n-2)/2} drho.

use std::collections::HashMap;
use std::f64::consts::PI;
use std::sync::{Arc, Mutex, OnceLock};

use rayon::prelude::*;

use crate::clifford_catalog::Signature;
use crate::error::{Error, Result};
use crate::oscgauss::Osc;
use crate::poly::C64;
use crate::quad;
use crate::schwartz_testfn::GaussPoly;
use crate::specfun::{self, adaptive, gamma_h, jacobi_unit, nodes_for_freq, HalfIntOrder};

const I: C64 = C64::new(0.0, 1.0);

/// kappa(rho) = (rho/4) coth(rho/2), kappa(0) = 1/2.
pub fn kappa(rho: f64) -> f64 {
    if rho == 0.0 {
        return 0.5;
    }
    // coth(x/2) = 1 + 2/expm1(x), and rho/expm1(rho) -> 1 smoothly.
    let e = rho.exp_m1();
    0.25 * (rho + 2.0 * rho / e)
}

/// W(rho) = ((rho/2)/sinh(rho/2))^n.
pub fn volume_element(rho: f64, n: usize) -> f64 {
    let h = 0.5 * rho;
    if h == 0.0 {
        return 1.0;
    }
    (h / h.sinh()).powi(n as i32)
}

/// The neutral form P(x) = sum_{j<=n} x_j^2 - x_{n+j}^2 on R^{2n}.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct UHQuadratic {
    pub n: usize,
}

impl UHQuadratic {
    pub fn new(n: usize) -> Self {
        Self { n }
    }

    pub fn eval(&self, x: &[f64]) -> Result<f64> {
        if x.len() != 2 * self.n {
            return Err(Error::DimensionMismatch { expected: 2 * self.n, got: x.len() });
        }
        Ok(crate::group_core::p_form(x))
    }

    /// Diagonal of tau.
    pub fn tau(&self) -> Vec<f64> {
        crate::oscgauss::tau_signs(self.n)
    }

    /// L = sum d_j^2 - d_{n+j}^2 applied exactly.
    pub fn apply_l(&self, psi: &GaussPoly) -> Result<GaussPoly> {
        if psi.dim != 2 * self.n {
            return Err(Error::DimensionMismatch { expected: 2 * self.n, got: psi.dim });
        }
        Ok(psi.ultra_laplacian(self.n))
    }
}

/// Choice of the bounded pair (lambda, mu) with lambda + mu = 1.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum KernelSelector {
    Constant { lambda0: C64, mu0: C64 },
    /// lambda = 1 on theta >= 0, 0 otherwise; s = 1 only.
    HeavisideSign,
}

impl KernelSelector {
    pub fn constant(lambda0: C64, mu0: C64) -> Result<Self> {
        if (lambda0 + mu0 - 1.0).norm() > 1e-12 {
            return Err(Error::InvalidSelector(format!("lambda + mu = {} != 1", lambda0 + mu0)));
        }
        Ok(KernelSelector::Constant { lambda0, mu0 })
    }

    pub fn plus() -> Self {
        KernelSelector::Constant { lambda0: C64::new(1.0, 0.0), mu0: C64::new(0.0, 0.0) }
    }

    pub fn minus() -> Self {
        KernelSelector::Constant { lambda0: C64::new(0.0, 0.0), mu0: C64::new(1.0, 0.0) }
    }

    pub fn half() -> Self {
        KernelSelector::Constant { lambda0: C64::new(0.5, 0.0), mu0: C64::new(0.5, 0.0) }
    }

    /// (lambda(theta), mu(theta)).
    pub fn weights(&self, theta: &[f64]) -> Result<(C64, C64)> {
        match *self {
            KernelSelector::Constant { lambda0, mu0 } => Ok((lambda0, mu0)),
            KernelSelector::HeavisideSign => {
                if theta.len() != 1 {
                    return Err(Error::RequiresSOne);
                }
                let l = if theta[0] >= 0.0 { 1.0 } else { 0.0 };
                Ok((C64::new(l, 0.0), C64::new(1.0 - l, 0.0)))
            }
        }
    }

    /// Parses "1,0", "0.5,0.5", "0,1" or "heaviside".
    pub fn parse(s: &str) -> Result<Self> {
        let t = s.trim();
        if t.eq_ignore_ascii_case("heaviside") {
            return Ok(KernelSelector::HeavisideSign);
        }
        let parts: Vec<&str> = t.split(',').collect();
        if parts.len() != 2 {
            return Err(Error::InvalidSelector(s.to_string()));
        }
        let num = |p: &str| p.trim().parse::<f64>().map_err(|_| Error::InvalidSelector(s.to_string()));
        Self::constant(C64::new(num(parts[0])?, 0.0), C64::new(num(parts[1])?, 0.0))
    }
}

/// (2 pi)^{-(n + s/2)}.
pub fn gamma_const(n: usize, s: usize) -> f64 {
    (2.0 * PI).powf(-(n as f64 + s as f64 / 2.0))
}

fn check_r0(sig: Signature, xi: &[f64], theta: &[f64]) -> Result<f64> {
    if sig.r != 0 {
        return Err(Error::RequiresRZero);
    }
    if xi.len() != 2 * sig.n {
        return Err(Error::DimensionMismatch { expected: 2 * sig.n, got: xi.len() });
    }
    if theta.len() != sig.s {
        return Err(Error::DimensionMismatch { expected: sig.s, got: theta.len() });
    }
    let t = theta.iter().map(|x| x * x).sum::<f64>().sqrt();
    if t == 0.0 {
        return Err(Error::ThetaZero);
    }
    Ok(t)
}

/// int_0^1 (1 - rho^2)^{(n-2)/2} e^{i v rho} drho.
pub fn rho_integral(n: usize, v: f64) -> C64 {
    specfun::jh_rho_integral(n, v)
}

/// q(xi, theta) = i (2 pi)^{-(n+s/2)} |theta|^{-1} int_0^1 (1-rho^2)^{(n-2)/2} e^{i rho P/|theta|} drho.
pub fn kernel_q(sig: Signature, xi: &[f64], theta: &[f64]) -> Result<C64> {
    let t = check_r0(sig, xi, theta)?;
    let v = crate::group_core::p_form(xi) / t;
    Ok(I * gamma_const(sig.n, sig.s) / t * rho_integral(sig.n, v))
}

/// q^{lambda,mu} in its rho-integral form.
pub fn kernel_q_lm(sig: Signature, xi: &[f64], theta: &[f64], sel: KernelSelector) -> Result<C64> {
    let t = check_r0(sig, xi, theta)?;
    let (l, m) = sel.weights(theta)?;
    let v = crate::group_core::p_form(xi) / t;
    let plus = rho_integral(sig.n, v);
    let minus = plus.conj();
    Ok(I * gamma_const(sig.n, sig.s) / t * (l * plus - m * minus))
}

/// q^{lambda,mu} through c_1 J_nu + i H_nu, nu = (n-1)/2, c_1 = lambda - mu,
/// using the entire functions (2/v)^nu J_nu(v) (even) and (2/v)^nu H_nu(v) (odd).
pub fn kernel_q_lm_bessel(sig: Signature, xi: &[f64], theta: &[f64], sel: KernelSelector) -> Result<C64> {
    let t = check_r0(sig, xi, theta)?;
    let (l, m) = sel.weights(theta)?;
    let c1 = l - m;
    let n = sig.n;
    let nu = HalfIntOrder::for_n(n);
    let v = crate::group_core::p_form(xi) / t;
    let (jh, hh) = if v == 0.0 {
        (1.0 / gamma_h(nu.nu() + 1.0), 0.0)
    } else {
        let a = v.abs();
        let f = (2.0 / a).powf(nu.nu());
        (f * specfun::bessel_j(nu, a), v.signum() * f * specfun::struve_h(nu, a))
    };
    let pref = I * PI.sqrt() * gamma_h(n as f64 / 2.0) * gamma_const(n, sig.s) / (2.0 * t);
    Ok(pref * (c1 * jh + I * hh))
}

/// [G-bar q](xi, theta) = -P a - n |theta|^2 a_v - |theta|^2 P a_vv, where
/// q = a(P(xi), theta) and v-derivatives act on the integrand as i rho/|theta|.
/// The exact value is (2 pi)^{-(n+s/2)}.
pub fn gbar_residual(sig: Signature, xi: &[f64], theta: &[f64]) -> Result<C64> {
    let t = check_r0(sig, xi, theta)?;
    let n = sig.n as f64;
    let p = crate::group_core::p_form(xi);
    let w = p / t;
    let a = (n - 2.0) / 2.0;
    // combined integrand: e^{i w rho} [-P (1 - rho^2) - i n |theta| rho]
    let integral = adaptive(nodes_for_freq(w) / 2, |m| {
        jacobi_unit(a, m, |r| {
            C64::from_polar(1.0, w * r) * C64::new(-p * (1.0 - r * r), -n * t * r)
        })
    });
    Ok(I * gamma_const(sig.n, sig.s) / t * integral)
}

/// Same with a caller-supplied a_v, a_vv; used for finite-difference oracles.
pub fn gbar_from_derivatives(sig: Signature, p: f64, theta_norm: f64, a: C64, av: C64, avv: C64) -> C64 {
    let t2 = theta_norm * theta_norm;
    -p * a - sig.n as f64 * t2 * av - t2 * p * avv
}

/// a(v, |theta|) = q as a function of v = P(xi).
pub fn kernel_a(sig: Signature, v: f64, theta_norm: f64) -> C64 {
    I * gamma_const(sig.n, sig.s) / theta_norm * rho_integral(sig.n, v / theta_norm)
}

/// c_s in F[e^{-lambda |theta|}](z) = c_s lambda (lambda^2 + |z|^2)^{-(s+1)/2}.
pub fn c_s(s: usize) -> f64 {
    2f64.powf(s as f64 / 2.0) * gamma_h((s as f64 + 1.0) / 2.0) / PI.sqrt()
}

type QTable = Arc<Vec<Vec<f64>>>;

fn q_cache() -> &'static Mutex<HashMap<(usize, usize), QTable>> {
    static C: OnceLock<Mutex<HashMap<(usize, usize), QTable>>> = OnceLock::new();
    C.get_or_init(|| Mutex::new(HashMap::new()))
}

/// Coefficients (ascending powers of lambda) of Q_0..Q_{n-1} with
/// (-1)^{n-1} c_s d^{n-1}/dlambda^{n-1} [lambda w^{-a}] = sum_j Q_j(lambda) w^{-a-j},
/// w = lambda^2 + |z|^2, a = (s+1)/2. All coefficients are dyadic rationals,
/// so the f64 recursion is exact.
pub fn q_polynomials(n: usize, s: usize) -> QTable {
    let mut c = q_cache().lock().unwrap();
    if let Some(t) = c.get(&(n, s)) {
        return t.clone();
    }
    let a = (s as f64 + 1.0) / 2.0;
    let mut q: Vec<Vec<f64>> = vec![vec![0.0, 1.0]];
    for _ in 1..n {
        let mut next: Vec<Vec<f64>> = vec![Vec::new(); q.len() + 1];
        for (j, qj) in q.iter().enumerate() {
            // Q_j'
            let d: Vec<f64> = qj.iter().enumerate().skip(1).map(|(k, c)| c * k as f64).collect();
            add_into(&mut next[j], &d);
            // -2 (a + j) lambda Q_j goes to slot j + 1
            let mut sh = vec![0.0];
            sh.extend(qj.iter().map(|c| -2.0 * (a + j as f64) * c));
            add_into(&mut next[j + 1], &sh);
        }
        q = next;
    }
    let sign = if (n - 1) % 2 == 0 { 1.0 } else { -1.0 };
    let cs = c_s(s);
    let t: QTable = Arc::new(
        q.into_iter()
            .map(|p| {
                let mut p: Vec<f64> = p.into_iter().map(|x| x * sign * cs).collect();
                while p.len() > 1 && *p.last().unwrap() == 0.0 {
                    p.pop();
                }
                p
            })
            .collect(),
    );
    c.insert((n, s), t.clone());
    t
}

fn add_into(dst: &mut Vec<f64>, src: &[f64]) {
    if dst.len() < src.len() {
        dst.resize(src.len(), 0.0);
    }
    for (d, s) in dst.iter_mut().zip(src) {
        *d += s;
    }
}

/// Degree of Q_j (as a polynomial, zero polynomial has degree 0).
pub fn q_degree(p: &[f64]) -> usize {
    p.iter().rposition(|c| *c != 0.0).unwrap_or(0)
}

fn horner_c(p: &[f64], x: C64) -> C64 {
    p.iter().rev().fold(C64::new(0.0, 0.0), |acc, c| acc * x + *c)
}

/// Smooth kernel K(x, z) off the cone 4|z| >= |P(x)|, normalised so that
/// K^{1,0}(phi) = (2 pi)^{-(n+s/2)} int K phi when supp phi avoids the cone:
/// K = i int_0^inf (2 sinh t)^{-n} sum_j Q_j(l0) (l0^2 + |z|^2)^{-(s+1)/2-j} dt,
/// l0 = (i/4) P(x) coth t, powers on the branch reached from Im(l0^2) sgn P > 0.
pub fn smooth_kernel_offcone(sig: Signature, x: &[f64], z: &[f64]) -> Result<C64> {
    if sig.r != 0 {
        return Err(Error::RequiresRZero);
    }
    if x.len() != 2 * sig.n {
        return Err(Error::DimensionMismatch { expected: 2 * sig.n, got: x.len() });
    }
    if z.len() != sig.s {
        return Err(Error::DimensionMismatch { expected: sig.s, got: z.len() });
    }
    let p = crate::group_core::p_form(x);
    let z2: f64 = z.iter().map(|v| v * v).sum();
    if 4.0 * z2.sqrt() >= p.abs() {
        return Err(Error::OnConeRegion);
    }
    let (n, s) = (sig.n, sig.s);
    let qs = q_polynomials(n, s);
    let a = (s as f64 + 1.0) / 2.0;
    let sgn = p.signum();
    // rho = tanh t: (2 sinh t)^{-n} dt = (1-rho^2)^{n/2-1} (2 rho)^{-n} drho
    let integrand = move |rho: f64| -> C64 {
        let l0 = C64::new(0.0, p / (4.0 * rho));
        let w = z2 - p * p / (16.0 * rho * rho);
        let mut acc = C64::new(0.0, 0.0);
        for (j, qj) in qs.iter().enumerate() {
            let e = a + j as f64;
            // w < 0 here; w^{-e} = |w|^{-e} e^{-i pi e sgn P}
            let pw = C64::from_polar(w.abs().powf(-e), -PI * e * sgn);
            acc += horner_c(qj, l0) * pw;
        }
        acc * (2.0 * rho).powi(-(n as i32))
    };
    let alpha = n as f64 / 2.0 - 1.0;
    let mut m = 32;
    let mut prev = jacobi_unit(alpha, m, &integrand);
    loop {
        m *= 2;
        let cur = jacobi_unit(alpha, m, &integrand);
        if (cur - prev).norm() <= 1e-11 * cur.norm() || m >= 1024 {
            return Ok(I * cur);
        }
        prev = cur;
    }
}

fn half_dim(psi: &GaussPoly) -> Result<usize> {
    if psi.dim % 2 != 0 || psi.dim == 0 {
        return Err(Error::DimensionMismatch { expected: psi.dim + 1, got: psi.dim });
    }
    Ok(psi.dim / 2)
}

/// Gauss-Legendre on [0, 1] with doubling until two values agree to `tol`.
fn legendre_adaptive(tol: f64, f: impl Fn(f64) -> Result<C64> + Sync) -> Result<C64> {
    let run = |m: usize| -> Result<C64> {
        let nodes = quad::legendre_on(m, 0.0, 1.0);
        let vals: Result<Vec<C64>> = nodes.par_iter().map(|(x, w)| Ok(f(*x)? * *w)).collect();
        Ok(quad::pairwise_sum(&vals?))
    };
    let mut m = 16;
    let mut prev = run(m)?;
    loop {
        m *= 2;
        let cur = run(m)?;
        if (cur - prev).norm() <= tol * cur.norm().max(1e-300) || m >= 512 {
            return Ok(cur);
        }
        prev = cur;
    }
}

/// The two pieces of 1/P^{n-1}[psi]:
/// I_1 = i^{n-1}/Gamma(n-1) int_0^1 t^{n-2} int psi e^{-iPt} dx dt and
/// I_2 = i^{n-1}/(2^n Gamma(n-1)) int_0^1 int (F^{-1} psi) e^{i u P/4} dxi du,
/// the second after t = 1/u.
pub fn inv_p_parts(psi: &GaussPoly) -> Result<(C64, C64)> {
    let n = half_dim(psi)?;
    if n < 2 {
        return Err(Error::UnsupportedN(n));
    }
    let pre = I.powi(n as i32 - 1) / gamma_h(n as f64 - 1.0);
    let o1 = Osc::new(psi)?;
    let i1 = legendre_adaptive(1e-13, |t| Ok(o1.eval(t)? * t.powi(n as i32 - 2)))?;
    let fi = psi.inverse_fourier()?;
    let o2 = Osc::new(&fi)?;
    let i2 = legendre_adaptive(1e-13, |u| o2.eval(-u / 4.0))?;
    Ok((pre * i1, pre * i2 / 2f64.powi(n as i32)))
}

/// lim_{eps -> 0} int psi (P - i eps)^{-(n-1)} dx on R^{2n}, n >= 2.
pub fn inv_p_power(psi: &GaussPoly) -> Result<C64> {
    let (a, b) = inv_p_parts(psi)?;
    Ok(a + b)
}

/// Node budget for the block-polar quadrature behind (P+i0)^mu pairings.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct PolarBudget {
    pub r_panels: usize,
    pub r_nodes: usize,
    /// Geometric panels [4^-k, 4^{1-k}] towards c = 0 and c = 1.
    pub c_levels: usize,
    pub c_nodes: usize,
    pub angles: usize,
}

impl Default for PolarBudget {
    fn default() -> Self {
        Self { r_panels: 6, r_nodes: 12, c_levels: 14, c_nodes: 10, angles: 14 }
    }
}

impl PolarBudget {
    pub fn refined(&self) -> Self {
        Self {
            r_panels: self.r_panels * 2,
            r_nodes: self.r_nodes,
            c_levels: self.c_levels + 4,
            c_nodes: self.c_nodes + 4,
            angles: self.angles * 2,
        }
    }
}

/// Angular averages of psi on a block-polar grid.
///
/// x = (a w1, b w2), a = R sqrt((1+c)/2), b = R sqrt((1-c)/2), w1, w2 on S^{n-1},
/// so that P = R^2 c and dx = R^{2n-1} 2^{-n} (1-c^2)^{(n-2)/2} dR dc dw1 dw2.
/// The grid does not depend on mu, so one table serves every power and its
/// mu-derivatives.
pub struct PolarTable {
    /// (log R, weight incl. R^{2n-1} 2^{-n})
    r: Vec<(f64, f64)>,
    /// (c, weight incl. (1-c^2)^{(n-2)/2})
    c: Vec<(f64, f64)>,
    avg: Vec<Vec<C64>>,
}

fn unit_panels(levels: usize, grade_right: bool) -> Vec<f64> {
    // geometric towards c = 0 (|c|^mu log|c|) and, for odd n, towards c = 1
    let mut b = vec![0.0];
    for k in (1..=levels).rev() {
        b.push(0.5 * 4f64.powi(-(k as i32)));
    }
    b.push(0.5);
    if grade_right {
        for k in 1..=levels {
            b.push(1.0 - 0.5 * 4f64.powi(-(k as i32)));
        }
    } else {
        b.push(0.75);
    }
    b.push(1.0);
    b
}

impl PolarTable {
    pub fn new(psi: &GaussPoly, budget: PolarBudget) -> Result<Self> {
        let n = half_dim(psi)?;
        if n > 3 {
            return Err(Error::UnsupportedN(n));
        }
        let a_re = psi.quad.map(|z| z.re);
        let lmin = a_re.clone().symmetric_eigenvalues().min();
        if lmin <= 0.0 {
            return Err(Error::NonSPDQuadraticForm);
        }
        let centre = a_re.try_inverse().ok_or(Error::NonSPDQuadraticForm)? * psi.lin.map(|z| z.re);
        let deg = psi.poly.degree() as f64 + 2.0 * n as f64 + 8.0;
        let rmax = centre.norm() + (2.0 * (40.0 + 2.0 * deg) / lmin).sqrt();
        let h = rmax / budget.r_panels as f64;
        let mut breaks = quad::graded_breaks(h / 16.0, h);
        for k in 2..=budget.r_panels {
            breaks.push(h * k as f64);
        }
        let r: Vec<(f64, f64)> = quad::composite(&breaks, budget.r_nodes)
            .into_iter()
            .map(|(x, w)| (x.ln(), w * x.powi(2 * n as i32 - 1) * 2f64.powi(-(n as i32))))
            .collect();
        let alpha = (n as f64 - 2.0) / 2.0;
        let mut c = Vec::new();
        for (x, w) in quad::composite(&unit_panels(budget.c_levels, n % 2 == 1), budget.c_nodes) {
            let wt = w * (1.0 - x * x).powf(alpha);
            c.push((x, wt));
            c.push((-x, wt));
        }
        let sph = quad::sphere(n, budget.angles);
        let avg: Vec<Vec<C64>> = r
            .par_iter()
            .map(|&(lr, _)| {
                let rr = lr.exp();
                let mut u = vec![0.0; 2 * n];
                c.iter()
                    .map(|&(cc, _)| {
                        let a = rr * (0.5 * (1.0 + cc)).sqrt();
                        let b = rr * (0.5 * (1.0 - cc)).sqrt();
                        let mut acc = C64::new(0.0, 0.0);
                        for (w1, q1) in &sph {
                            for (w2, q2) in &sph {
                                for k in 0..n {
                                    u[k] = a * w1[k];
                                    u[n + k] = b * w2[k];
                                }
                                acc += psi.evaluate(&u) * (q1 * q2);
                            }
                        }
                        acc
                    })
                    .collect()
            })
            .collect();
        Ok(Self { r, c, avg })
    }

    /// sum over the grid of (P+i0)^mu log(P+i0)^d psi, for Re mu >= 0.
    pub fn pair(&self, mu: C64, log_power: u32) -> C64 {
        let rows: Vec<C64> = self
            .r
            .iter()
            .zip(&self.avg)
            .map(|(&(lr, wr), row)| {
                let mut acc = C64::new(0.0, 0.0);
                for (&(c, wc), v) in self.c.iter().zip(row) {
                    // log(P + i0) = log|P| + i pi 1_{P<0}
                    let lp = C64::new(2.0 * lr + c.abs().ln(), if c < 0.0 { PI } else { 0.0 });
                    acc += *v * wc * (mu * lp).exp() * lp.powu(log_power);
                }
                acc * wr
            })
            .collect();
        quad::pairwise_sum(&rows)
    }
}

/// ((P+i0)^mu, psi) = (P_+^mu, psi) + e^{i pi mu} (P_-^mu, psi) for Re mu >= 0.
pub fn p_plus_i0_direct(mu: C64, psi: &GaussPoly, budget: PolarBudget) -> Result<C64> {
    if mu.re < 0.0 {
        return Err(Error::PolePosition(format!("direct pairing needs Re(mu) >= 0, got {mu}")));
    }
    Ok(PolarTable::new(psi, budget)?.pair(mu, 0))
}

/// Continuation ((P+i0)^lambda, psi) = Lambda(lambda, k) ((P+i0)^{lambda+k}, L^k psi)
/// with 1/Lambda = 4^k prod_{j=1..k} (lambda+j)(n+lambda+j-1).
///
/// When exactly one factor vanishes and ((P+i0)^{lambda+k}, L^k psi) vanishes
/// with it, the value is the quotient of the lambda-derivatives, the numerator
/// carrying the extra factor log(P+i0).
pub fn p_plus_i0_power(lambda: C64, psi: &GaussPoly, k: usize) -> Result<C64> {
    p_plus_i0_power_with(lambda, psi, k, PolarBudget::default())
}

pub fn p_plus_i0_power_with(lambda: C64, psi: &GaussPoly, k: usize, budget: PolarBudget) -> Result<C64> {
    let n = half_dim(psi)?;
    if lambda.re + (k as f64) < 0.0 {
        return Err(Error::PolePosition(format!("Re(lambda) + k must be >= 0, got {}", lambda.re + k as f64)));
    }
    let mut factors = Vec::with_capacity(2 * k);
    for j in 1..=k {
        factors.push(lambda + j as f64);
        factors.push(lambda + (n + j - 1) as f64);
    }
    let zeros = factors.iter().filter(|f| f.norm() < 1e-12).count();
    if zeros > 1 {
        return Err(Error::PolePosition(lambda.to_string()));
    }
    let rest: C64 = factors
        .iter()
        .filter(|f| f.norm() >= 1e-12)
        .fold(C64::new(4f64.powi(k as i32), 0.0), |a, f| a * f);
    let mut lk = psi.clone();
    for _ in 0..k {
        lk = lk.ultra_laplacian(n);
    }
    let table = PolarTable::new(&lk, budget)?;
    let mu = lambda + k as f64;
    if zeros == 0 {
        return Ok(table.pair(mu, 0) / rest);
    }
    let g = table.pair(mu, 0);
    let scale = table.pair(C64::new(mu.re, 0.0), 0).norm().max(table.pair(mu, 1).norm());
    if g.norm() > 1e-6 * scale.max(1e-300) {
        return Err(Error::PolePosition(format!("{lambda} (numerator {g} does not vanish)")));
    }
    Ok(table.pair(mu, 1) / rest)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn kappa_and_volume_element_limits() {
        assert_eq!(kappa(0.0), 0.5);
        assert!((kappa(1e-9) - 0.5).abs() < 1e-12);
        let r: f64 = 1.3;
        assert!((kappa(r) - r / 4.0 / (r / 2.0).tanh()).abs() < 1e-15);
        assert_eq!(volume_element(0.0, 3), 1.0);
        assert!((volume_element(2.0, 2) - (1.0 / 1f64.sinh()).powi(2)).abs() < 1e-15);
    }

    #[test]
    fn selector_parsing() {
        assert_eq!(KernelSelector::parse("1,0").unwrap(), KernelSelector::plus());
        assert_eq!(KernelSelector::parse(" 0.5, 0.5 ").unwrap(), KernelSelector::half());
        assert_eq!(KernelSelector::parse("Heaviside").unwrap(), KernelSelector::HeavisideSign);
        assert!(matches!(KernelSelector::parse("0.3,0.3"), Err(Error::InvalidSelector(_))));
        assert!(matches!(KernelSelector::parse("x"), Err(Error::InvalidSelector(_))));
        assert!(matches!(KernelSelector::HeavisideSign.weights(&[1.0, 2.0]), Err(Error::RequiresSOne)));
    }

    #[test]
    fn q_table_heisenberg() {
        let cs = c_s(1);
        assert!((cs - (2.0 / PI).sqrt()).abs() < 1e-15);
        let q = q_polynomials(2, 1);
        assert_eq!(q.len(), 2);
        assert_eq!(q[0], vec![-cs]);
        assert_eq!(q[1], vec![0.0, 0.0, 2.0 * cs]);
        assert_eq!(q_degree(&q[1]), 2);
    }

    #[test]
    fn argument_errors() {
        let sig = Signature::new(0, 1, 2);
        let xi = [1.0, 0.0, 0.0, 0.0];
        assert_eq!(kernel_q(sig, &xi, &[0.0]), Err(Error::ThetaZero));
        assert_eq!(kernel_q(Signature::new(1, 1, 2), &xi, &[1.0]), Err(Error::RequiresRZero));
        assert!(matches!(kernel_q(sig, &xi[..3], &[1.0]), Err(Error::DimensionMismatch { .. })));
        assert_eq!(smooth_kernel_offcone(sig, &[1.0, 0.0, 0.0, 0.0], &[0.3]), Err(Error::OnConeRegion));
        let psi = GaussPoly::isotropic(1.0, &[0.0; 2]);
        assert_eq!(inv_p_power(&psi), Err(Error::UnsupportedN(1)));
    }

    #[test]
    fn kernel_q_is_the_plus_member() {
        let sig = Signature::new(0, 2, 2);
        let xi = [0.4, -1.1, 0.3, 0.9];
        let th = [0.5, -0.7];
        let a = kernel_q(sig, &xi, &th).unwrap();
        let b = kernel_q_lm(sig, &xi, &th, KernelSelector::plus()).unwrap();
        assert!((a - b).norm() < 1e-16);
    }
}
