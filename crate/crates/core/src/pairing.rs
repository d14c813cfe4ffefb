//! Pairings of the fundamental solutions with test functions.
//!
//! Every pairing is computed twice, at the requested budget and at a coarser
//! one; `est_error` is the difference.

use std::f64::consts::PI;

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::clifford_catalog::Signature;
use crate::error::{Error, Result};
use crate::kernel_eval::{gamma_const, inv_p_power, smooth_kernel_offcone, KernelSelector};
use crate::oscgauss::{Osc, OscGauss};
use crate::poly::{Poly, C64};
use crate::quad;
use crate::schwartz_testfn::{CompiledGauss, GaussPoly};
use crate::specfun::gamma_h;

const I: C64 = C64::new(0.0, 1.0);
const ZERO: C64 = C64::new(0.0, 0.0);

#[derive(Debug, Clone, PartialEq)]
pub struct PairingResult {
    pub value: C64,
    pub est_error: f64,
    pub node_budget: Vec<usize>,
}

fn refine_pair(fine: C64, coarse: C64, budget: Vec<usize>) -> PairingResult {
    PairingResult { value: fine, est_error: (fine - coarse).norm(), node_budget: budget }
}

fn sum(v: &[C64]) -> C64 {
    quad::pairwise_sum(v)
}

/// Centre norm and smallest curvature of |f| restricted (by marginalising
/// the other axes) to `axes`, from the real part of the quadratic form.
fn marginal_extent(f: &GaussPoly, axes: &[usize]) -> Result<(f64, f64)> {
    let a = f.quad.map(|z| z.re);
    let cov = a.clone().try_inverse().ok_or(Error::NonSPDQuadraticForm)?;
    let centre = &cov * f.lin.map(|z| z.re);
    let k = axes.len();
    let sub = DMatrix::from_fn(k, k, |i, j| cov[(axes[i], axes[j])]);
    let prec = sub.try_inverse().ok_or(Error::NonSPDQuadraticForm)?;
    let lmin = prec.symmetric_eigenvalues().min();
    if lmin <= 0.0 {
        return Err(Error::NonSPDQuadraticForm);
    }
    let c = axes.iter().map(|&i| centre[i] * centre[i]).sum::<f64>().sqrt();
    Ok((c, lmin))
}

/// Radius beyond which exp(-lmin r^2 / 2) r^deg is negligible.
fn cutoff(centre: f64, lmin: f64, deg: usize) -> f64 {
    centre + (2.0 * (40.0 + 2.0 * deg as f64) / lmin).sqrt()
}

/// Radial rule on [0, rmax]: `levels` geometric panels towards 0 inside the
/// first of `panels` uniform panels.
fn radial_rule(rmax: f64, levels: usize, panels: usize, nodes: usize) -> Vec<(f64, f64)> {
    let h = rmax / panels as f64;
    let mut breaks = quad::geometric_to_zero(h, levels);
    for k in 2..=panels {
        breaks.push(h * k as f64);
    }
    quad::composite(&breaks, nodes)
}

/// Node budget for pair_K.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KBudget {
    pub radial_levels: usize,
    pub radial_panels: usize,
    pub radial_nodes: usize,
    pub sphere: usize,
    pub rho_nodes: usize,
}

impl KBudget {
    pub fn for_s(s: usize) -> Self {
        Self {
            radial_levels: if s == 1 { 40 } else { 12 },
            radial_panels: 8,
            radial_nodes: 12,
            sphere: 12,
            rho_nodes: 12,
        }
    }

    pub fn coarse(&self) -> Self {
        Self {
            radial_levels: self.radial_levels * 3 / 4,
            radial_panels: self.radial_panels * 3 / 4,
            radial_nodes: self.radial_nodes * 3 / 4,
            sphere: self.sphere * 3 / 4,
            rho_nodes: self.rho_nodes * 3 / 4,
        }
    }

    fn as_vec(&self) -> Vec<usize> {
        vec![self.radial_levels, self.radial_panels, self.radial_nodes, self.sphere, self.rho_nodes]
    }
}

/// int_0^1 (1-rho^2)^alpha f(rho) drho with panels graded at `h` towards 0 and a
/// Gauss-Jacobi last panel.
fn rho_panels(h: f64, alpha: f64, nodes: usize, f: impl Fn(f64) -> C64) -> C64 {
    let h = h.min(0.5);
    let breaks = quad::graded_breaks(h, 1.0);
    let mut acc = ZERO;
    let last = breaks.len() - 2;
    for (k, w) in breaks.windows(2).enumerate() {
        if k < last {
            for (x, wt) in quad::legendre_on(nodes, w[0], w[1]) {
                acc += f(x) * (wt * (1.0 - x * x).powf(alpha));
            }
        } else {
            let a = w[0];
            let half = 0.5 * (1.0 - a);
            let jr = quad::jacobi(nodes + nodes % 2, alpha, 0.0);
            for (y, wt) in jr.pairs() {
                let x = a + half * (1.0 + y);
                acc += f(x) * (wt * half.powf(alpha + 1.0) * (1.0 + x).powf(alpha));
            }
        }
    }
    acc
}

/// K^{lambda,mu}(phi) = int q^{lambda,mu}(xi, theta) [F phi](xi, theta) dxi dtheta.
///
/// theta = R w: for each (R, w) the xi-integral of q times the slice is
/// i c / R int_0^1 (1-rho^2)^{(n-2)/2} [lambda J(-rho/R) - mu J(rho/R)] drho with
/// J(kappa) = int [F phi](xi, R w) e^{-i kappa P(xi)} dxi in closed form.
pub fn pair_k(sig: Signature, phi: &GaussPoly, sel: KernelSelector) -> Result<PairingResult> {
    pair_k_with(sig, phi, sel, KBudget::for_s(sig.s))
}

pub fn pair_k_with(sig: Signature, phi: &GaussPoly, sel: KernelSelector, budget: KBudget) -> Result<PairingResult> {
    check_sig(sig, phi)?;
    if matches!(sel, KernelSelector::HeavisideSign) && sig.s != 1 {
        return Err(Error::RequiresSOne);
    }
    let fphi = phi.fourier()?;
    let fine = pair_k_value(sig, &fphi, sel, budget)?;
    let coarse = pair_k_value(sig, &fphi, sel, budget.coarse())?;
    Ok(refine_pair(fine, coarse, budget.as_vec()))
}

fn check_sig(sig: Signature, phi: &GaussPoly) -> Result<()> {
    if sig.r != 0 {
        return Err(Error::RequiresRZero);
    }
    let d = 2 * sig.n + sig.s;
    if phi.dim != d {
        return Err(Error::DimensionMismatch { expected: d, got: phi.dim });
    }
    Ok(())
}

fn pair_k_value(sig: Signature, fphi: &GaussPoly, sel: KernelSelector, b: KBudget) -> Result<C64> {
    let (n, s) = (sig.n, sig.s);
    let nd = 2 * n;
    let th_axes: Vec<usize> = (nd..nd + s).collect();
    let (centre, lmin) = marginal_extent(fphi, &th_axes)?;
    let rmax = cutoff(centre, lmin, fphi.poly.degree());
    let radial = radial_rule(rmax, b.radial_levels, b.radial_panels, b.radial_nodes);
    let sphere = quad::sphere(s, b.sphere);
    let template = {
        let g0 = fphi.slice(&th_axes.iter().map(|&a| (a, 0.0)).collect::<Vec<_>>());
        OscGauss::new(&g0)?
    };
    let dmax = template.eigenvalues().iter().fold(0.0f64, |m, d| m.max(d.abs()));
    let alpha = (n as f64 - 2.0) / 2.0;
    let c = gamma_const(n, s);
    let mut jobs = Vec::with_capacity(radial.len() * sphere.len());
    for &(r, wr) in &radial {
        for (w, ww) in &sphere {
            jobs.push((r, wr * ww, w.clone()));
        }
    }
    let vals: Result<Vec<C64>> = jobs
        .par_iter()
        .map(|(r, wt, w)| {
            let r = *r;
            let th: Vec<f64> = w.iter().map(|x| x * r).collect();
            let (lam, mu) = sel.weights(&th)?;
            let fixed: Vec<(usize, f64)> = th_axes.iter().zip(&th).map(|(&a, &v)| (a, v)).collect();
            let osc = template.rebind(&fphi.slice(&fixed));
            let f = |rho: f64| {
                let mut v = ZERO;
                if lam != ZERO {
                    v += lam * osc.eval(-rho / r);
                }
                if mu != ZERO {
                    v -= mu * osc.eval(rho / r);
                }
                v
            };
            let integral = rho_panels(r / (8.0 * dmax), alpha, b.rho_nodes, f);
            Ok(I * c / r * integral * r.powi(s as i32 - 1) * *wt)
        })
        .collect();
    Ok(sum(&vals?))
}

/// Budget for the Mueller-Ricci representation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MrBudget {
    pub radial_panels: usize,
    pub radial_nodes: usize,
    pub sigma_nodes: usize,
    pub z_panels: usize,
    pub z_nodes: usize,
    pub u_panels: usize,
    pub u_nodes: usize,
    pub angles: usize,
}

impl Default for MrBudget {
    fn default() -> Self {
        Self {
            radial_panels: 4,
            radial_nodes: 8,
            sigma_nodes: 8,
            z_panels: 6,
            z_nodes: 10,
            u_panels: 3,
            u_nodes: 8,
            angles: 8,
        }
    }
}

impl MrBudget {
    pub fn coarse(&self) -> Self {
        Self {
            radial_panels: self.radial_panels * 3 / 4,
            radial_nodes: self.radial_nodes * 3 / 4,
            sigma_nodes: self.sigma_nodes * 3 / 4,
            z_panels: self.z_panels * 3 / 4,
            z_nodes: self.z_nodes * 3 / 4,
            u_panels: self.u_panels * 3 / 4,
            u_nodes: self.u_nodes * 3 / 4,
            angles: self.angles * 3 / 4,
        }
    }

    fn as_vec(&self) -> Vec<usize> {
        vec![
            self.radial_panels,
            self.radial_nodes,
            self.sigma_nodes,
            self.z_panels,
            self.z_nodes,
            self.u_panels,
            self.u_nodes,
            self.angles,
        ]
    }
}

/// -(4 pi i)^{-n} int_0^inf sinh^{-n} t int d_z^{n-1} phi(x, -P(x) coth t / 4) dx dt
/// on the Heisenberg-type group (s = 1), n = 2.
///
/// With rho = tanh t and x = (a w1, b w2), a = R sqrt((1+c)/2), b = R sqrt((1-c)/2),
/// P = R^2 c, the constraint z = -P coth t / 4 reads c = -sigma z, sigma = 4 rho / R^2.
/// For n = 2 this leaves
/// int R dR int_0^{4/R^2} dsigma/sigma int_{|z| < 1/sigma} A(R, -sigma z, z) dz
/// with A the S^1 x S^1 average of d_z phi. Past sigma = 1/zmax the variable
/// u = 1/sigma, z = u y is used instead.
pub fn pair_mr_heisenberg(phi: &GaussPoly) -> Result<PairingResult> {
    pair_mr_with(phi, MrBudget::default())
}

pub fn pair_mr_with(phi: &GaussPoly, budget: MrBudget) -> Result<PairingResult> {
    if phi.dim % 2 == 0 {
        return Err(Error::DimensionMismatch { expected: phi.dim + 1, got: phi.dim });
    }
    let n = (phi.dim - 1) / 2;
    if n % 2 == 1 {
        return Err(Error::OddN(n));
    }
    if n != 2 {
        return Err(Error::UnsupportedN(n));
    }
    let psi = phi.differentiate(2 * n)?;
    let fine = pair_mr_value(&psi, budget)?;
    let coarse = pair_mr_value(&psi, budget.coarse())?;
    Ok(refine_pair(fine, coarse, budget.as_vec()))
}

fn pair_mr_value(psi: &GaussPoly, b: MrBudget) -> Result<C64> {
    let (cx, lx) = marginal_extent(psi, &[0, 1, 2, 3])?;
    let (cz, lz) = marginal_extent(psi, &[4])?;
    let deg = psi.poly.degree();
    let rmax = cutoff(cx, lx, deg);
    let zmax = cutoff(cz, lz, deg);
    let rrule = quad::composite(
        &{
            let h = rmax / b.radial_panels as f64;
            let mut br = quad::graded_breaks(h / 8.0, h);
            for k in 2..=b.radial_panels {
                br.push(h * k as f64);
            }
            br
        },
        b.radial_nodes,
    );
    let circle = quad::sphere(2, b.angles);
    let zbreaks: Vec<f64> = (0..=b.z_panels).map(|k| -1.0 + 2.0 * k as f64 / b.z_panels as f64).collect();
    let zr = quad::composite(&zbreaks, b.z_nodes);
    let fast = CompiledGauss::new(psi);
    // angular average of psi at (R, c, z)
    let avg = |r: f64, c: f64, z: f64| -> C64 {
        let a = r * (0.5 * (1.0 + c)).max(0.0).sqrt();
        let bb = r * (0.5 * (1.0 - c)).max(0.0).sqrt();
        let mut u = [0.0; 5];
        u[4] = z;
        let mut acc = ZERO;
        for (w1, q1) in &circle {
            u[0] = a * w1[0];
            u[1] = a * w1[1];
            for (w2, q2) in &circle {
                u[2] = bb * w2[0];
                u[3] = bb * w2[1];
                acc += fast.eval(&u) * (q1 * q2);
            }
        }
        acc
    };
    let sig_a = 1.0 / zmax;
    let vals: Vec<C64> = rrule
        .par_iter()
        .map(|&(r, wr)| {
            let mut acc = ZERO;
            // sigma in (0, min(1/zmax, 4/R^2)), z over [-zmax, zmax]
            let s_hi = sig_a.min(4.0 / (r * r));
            for (sg, ws) in quad::legendre_on(b.sigma_nodes, 0.0, s_hi) {
                let mut inner = ZERO;
                for &(y, wy) in &zr {
                    let z = zmax * y;
                    inner += avg(r, -sg * z, z) * (wy * zmax);
                }
                acc += inner * (ws / sg);
            }
            // u = 1/sigma in (R^2/4, zmax), z = u y
            let u_lo = 0.25 * r * r;
            if u_lo < zmax {
                let br: Vec<f64> = (0..=b.u_panels)
                    .map(|k| u_lo + (zmax - u_lo) * (k as f64 / b.u_panels as f64).powi(2))
                    .collect();
                for (u, wu) in quad::composite(&br, b.u_nodes) {
                    let mut inner = ZERO;
                    for &(y, wy) in &zr {
                        inner += avg(r, -y, u * y) * wy;
                    }
                    acc += inner * wu;
                }
            }
            acc * (wr * r)
        })
        .collect();
    let pref = -(4.0 * PI * I).powi(-2);
    Ok(pref * sum(&vals))
}

/// Budget for the second form.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SecondBudget {
    pub radial_levels: usize,
    pub radial_panels: usize,
    pub radial_nodes: usize,
    pub sphere: usize,
    pub kappa_nodes: usize,
    pub tail_levels: usize,
}

impl Default for SecondBudget {
    fn default() -> Self {
        Self { radial_levels: 14, radial_panels: 8, radial_nodes: 12, sphere: 12, kappa_nodes: 12, tail_levels: 24 }
    }
}

impl SecondBudget {
    pub fn coarse(&self) -> Self {
        Self {
            radial_levels: self.radial_levels * 3 / 4,
            radial_panels: self.radial_panels * 3 / 4,
            radial_nodes: self.radial_nodes * 3 / 4,
            sphere: self.sphere * 3 / 4,
            kappa_nodes: self.kappa_nodes * 3 / 4,
            tail_levels: self.tail_levels * 3 / 4,
        }
    }

    fn as_vec(&self) -> Vec<usize> {
        vec![self.radial_levels, self.radial_panels, self.radial_nodes, self.sphere, self.kappa_nodes, self.tail_levels]
    }
}

/// W_r(kappa) = int_{r/(4 kappa)}^1 (1-rho^2)^{n/2-1} rho^{-1} (kappa - r/(4 rho))^{n-2} drho.
fn second_weight(n: usize, r: f64, kappa: f64) -> f64 {
    let rho0 = r / (4.0 * kappa);
    if rho0 >= 1.0 {
        return 0.0;
    }
    if n == 2 {
        return -rho0.ln();
    }
    let alpha = n as f64 / 2.0 - 1.0;
    // log-spaced in rho to absorb 1/rho, Jacobi at rho = 1
    let f = |rho: f64| (kappa - r / (4.0 * rho)).powi(n as i32 - 2) / rho * (1.0 + rho).powf(alpha);
    let half = 0.5 * (1.0 - rho0);
    let jr = quad::jacobi(24, alpha, 0.0);
    jr.pairs()
        .map(|(y, w)| {
            let x = rho0 + half * (1.0 + y);
            w * half.powf(alpha + 1.0) * f(x)
        })
        .sum()
}

/// The second form of K^{1,0}:
/// (2/i)^{n-2} c i^{n-1}/Gamma(n-1) int_0^1 (1-rho^2)^{n/2-1} rho^{-1} int_0^inf dr int dsigma(w)
/// int_0^inf tau^{n-2} J_{G_{r,w}}(tau + r/(4 rho)) dtau, where J_g(kappa) = int g e^{-i kappa P}
/// and G_{r,w} = d^{n-1}/dr^{n-1} [r^{n+s-2} F_z phi(., r w)]. The rho and tau integrals are
/// exchanged into a single kappa-integral against `second_weight`.
pub fn pair_second_form(sig: Signature, phi: &GaussPoly) -> Result<PairingResult> {
    pair_second_form_with(sig, phi, SecondBudget::default())
}

pub fn pair_second_form_with(sig: Signature, phi: &GaussPoly, budget: SecondBudget) -> Result<PairingResult> {
    check_sig(sig, phi)?;
    if sig.n < 2 {
        return Err(Error::UnsupportedN(sig.n));
    }
    let fine = second_value(sig, phi, budget)?;
    let coarse = second_value(sig, phi, budget.coarse())?;
    Ok(refine_pair(fine, coarse, budget.as_vec()))
}

fn falling(m: usize, j: usize) -> f64 {
    (0..j).map(|i| (m - i) as f64).product()
}

fn binom(n: usize, k: usize) -> f64 {
    (0..k).map(|i| (n - i) as f64 / (i + 1) as f64).product()
}

fn second_value(sig: Signature, phi: &GaussPoly, b: SecondBudget) -> Result<C64> {
    let (n, s) = (sig.n, sig.s);
    let nd = 2 * n;
    let th_axes: Vec<usize> = (nd..nd + s).collect();
    let fz = phi.fourier_axes(&th_axes, -1.0)?;
    let (centre, lmin) = marginal_extent(&phi.fourier()?, &th_axes)?;
    let rmax = cutoff(centre, lmin, phi.poly.degree() + n);
    let radial = radial_rule(rmax, b.radial_levels, b.radial_panels, b.radial_nodes);
    let sphere = quad::sphere(s, b.sphere);
    let m = n + s - 2;
    // scale of the kappa-structure from the x-block of F_z phi
    let xblock = DMatrix::from_fn(nd, nd, |i, j| fz.quad[(i, j)].re);
    let ev = xblock.symmetric_eigenvalues();
    let kscale = 0.125 * ev.min();
    let kmax = ev.max();
    let mut jobs = Vec::new();
    for (w, ww) in &sphere {
        // (w . grad_theta)^k F_z phi, k = 0..n-1
        let mut ders = vec![fz.clone()];
        for k in 1..n {
            let prev: &GaussPoly = &ders[k - 1];
            let mut acc: Option<GaussPoly> = None;
            for (i, &ax) in th_axes.iter().enumerate() {
                if w[i] == 0.0 {
                    continue;
                }
                let d = prev.differentiate(ax)?.scale(C64::new(w[i], 0.0));
                acc = Some(match acc {
                    None => d,
                    Some(a) => {
                        let mut a = a;
                        a.poly.add_assign(&d.poly);
                        a
                    }
                });
            }
            ders.push(acc.unwrap_or_else(|| GaussPoly { poly: Poly::zero(prev.dim), ..prev.clone() }));
        }
        for &(r, wr) in &radial {
            jobs.push((r, wr * ww, w.clone(), ders.clone()));
        }
    }
    let vals: Result<Vec<C64>> = jobs
        .par_iter()
        .map(|(r, wt, w, ders)| {
            let r = *r;
            let fixed: Vec<(usize, f64)> = th_axes.iter().zip(w).map(|(&a, &v)| (a, v * r)).collect();
            let mut g = ders[0].slice(&fixed);
            let mut poly = Poly::zero(nd);
            for j in 0..n {
                if j > m {
                    break;
                }
                let coef = binom(n - 1, j) * falling(m, j) * r.powi((m - j) as i32);
                let sl = ders[n - 1 - j].slice(&fixed);
                poly.add_assign(&sl.poly.scale(C64::new(coef, 0.0)));
            }
            g.poly = poly;
            if g.poly.is_zero() {
                return Ok(ZERO);
            }
            let osc = Osc::new(&g)?;
            let k0 = r / 4.0;
            let ks = kscale.max(k0);
            // [k0, L] graded from k0, then kappa = L / u on (0, 1]
            let l = 4.0 * (k0 + kmax);
            let mut acc = ZERO;
            let mut breaks = vec![k0];
            let mut x = k0 + ks;
            while x < l {
                breaks.push(x);
                x = k0 + 2.0 * (x - k0);
            }
            breaks.push(l);
            for (kap, wk) in quad::composite(&breaks, b.kappa_nodes) {
                acc += osc.eval(kap)? * (wk * second_weight(n, r, kap));
            }
            for (u, wu) in quad::composite(&quad::geometric_to_zero(1.0, b.tail_levels), b.kappa_nodes) {
                let kap = l / u;
                acc += osc.eval(kap)? * (wu * l / (u * u) * second_weight(n, r, kap));
            }
            Ok(acc * *wt)
        })
        .collect();
    let pre = (2.0 / I).powi(n as i32 - 2) * gamma_const(n, s) * I.powi(n as i32 - 1) / gamma_h(n as f64 - 1.0);
    Ok(pre * sum(&vals?))
}

/// Both sides of K~(Delta phi) = phi(0) + (2 pi)^{-s/2} int |theta|^2/4 [F phi](0, theta) dtheta
/// for the kernel -(2 pi)^{-(2+s/2)} (P - i0)^{-1}, n = 2.
///
/// The left side applies 1/(P - i0) to xi -> F(Delta phi)(xi, theta) and integrates in
/// theta by Gauss-Hermite; the right side is exact. `delta_phi` is Delta_{0,s} phi.
pub fn pseudo_pair_n2(sig: Signature, phi: &GaussPoly, delta_phi: &GaussPoly) -> Result<(C64, C64)> {
    check_sig(sig, phi)?;
    check_sig(sig, delta_phi)?;
    if sig.n != 2 {
        return Err(Error::UnsupportedN(sig.n));
    }
    let s = sig.s;
    let nd = 4;
    let th_axes: Vec<usize> = (nd..nd + s).collect();
    let fd = delta_phi.fourier()?;
    let lhs_at = |m: usize| -> Result<C64> {
        let nodes = hermite_nodes(&fd, &th_axes, m)?;
        let vals: Result<Vec<C64>> = nodes
            .par_iter()
            .map(|(th, w)| {
                let fixed: Vec<(usize, f64)> = th_axes.iter().zip(th).map(|(&a, &v)| (a, v)).collect();
                Ok(inv_p_power(&fd.slice(&fixed))? * *w)
            })
            .collect();
        Ok(-gamma_const(2, s) * sum(&vals?))
    };
    let mut m = 16;
    let mut lhs = lhs_at(m)?;
    loop {
        m *= 2;
        let next = lhs_at(m)?;
        let done = (next - lhs).norm() <= 1e-9 * next.norm().max(1e-300) || m >= 128;
        lhs = next;
        if done {
            break;
        }
    }
    let fphi = phi.fourier()?;
    let fixed: Vec<(usize, f64)> = (0..nd).map(|a| (a, 0.0)).collect();
    let slice = fphi.slice(&fixed);
    let mut t2 = Poly::zero(s);
    for j in 0..s {
        t2.add_assign(&Poly::var(s, j).mul(&Poly::var(s, j)));
    }
    let extra = slice.mul_poly(&t2.scale(C64::new(0.25, 0.0))).integrate()?;
    let rhs = phi.evaluate(&vec![0.0; phi.dim]) + (2.0 * PI).powf(-(s as f64) / 2.0) * extra;
    Ok((lhs, rhs))
}

/// (2 pi)^{-(n+s/2)} int K phi with the smooth off-cone kernel, by tensor
/// Gauss-Hermite in the whitened coordinates of `phi`. Nodes inside the cone
/// 4|z| >= |P(x)| are dropped; if their weights carry more than 1e-6 of int |phi|
/// the function is not off-cone concentrated and OnConeRegion is returned.
pub fn pair_offcone(sig: Signature, phi: &GaussPoly, nodes: usize) -> Result<PairingResult> {
    check_sig(sig, phi)?;
    let fine = offcone_value(sig, phi, nodes)?;
    let coarse = offcone_value(sig, phi, (nodes * 3 / 4).max(2))?;
    Ok(refine_pair(fine, coarse, vec![nodes]))
}

fn offcone_value(sig: Signature, phi: &GaussPoly, m: usize) -> Result<C64> {
    let axes: Vec<usize> = (0..phi.dim).collect();
    let pts = hermite_nodes(phi, &axes, m)?;
    let f = CompiledGauss::new(phi);
    let nx = 2 * sig.n;
    let vals: Result<Vec<(C64, f64, f64)>> = pts
        .par_iter()
        .map(|(u, w)| {
            let v = f.eval(u) * *w;
            match smooth_kernel_offcone(sig, &u[..nx], &u[nx..]) {
                Ok(k) => Ok((k * v, v.norm(), 0.0)),
                Err(Error::OnConeRegion) => Ok((ZERO, v.norm(), v.norm())),
                Err(e) => Err(e),
            }
        })
        .collect();
    let vals = vals?;
    let mass: f64 = vals.iter().map(|x| x.1).sum();
    let dropped: f64 = vals.iter().map(|x| x.2).sum();
    if dropped > 1e-6 * mass {
        return Err(Error::OnConeRegion);
    }
    let acc = sum(&vals.iter().map(|x| x.0).collect::<Vec<_>>());
    Ok(acc * (2.0 * PI).powf(-(sig.n as f64 + sig.s as f64 / 2.0)))
}

/// Tensor Gauss-Hermite nodes for the theta-marginal of `f`, whitened by its
/// marginal covariance.
fn hermite_nodes(f: &GaussPoly, axes: &[usize], m: usize) -> Result<Vec<(Vec<f64>, f64)>> {
    let a = f.quad.map(|z| z.re);
    let cov = a.clone().try_inverse().ok_or(Error::NonSPDQuadraticForm)?;
    let centre = &cov * f.lin.map(|z| z.re);
    let k = axes.len();
    let sub = DMatrix::from_fn(k, k, |i, j| cov[(axes[i], axes[j])]);
    let l = sub.cholesky().ok_or(Error::NonSPDQuadraticForm)?.l();
    let det: f64 = l.diagonal().iter().product();
    let h = quad::hermite(m);
    let pairs: Vec<(f64, f64)> = h.pairs().collect();
    let mut out = Vec::new();
    let total = pairs.len().pow(k as u32);
    for idx in 0..total {
        let mut rem = idx;
        let mut y = vec![0.0; k];
        let mut w = 1.0;
        for yk in y.iter_mut() {
            let (x, wx) = pairs[rem % pairs.len()];
            rem /= pairs.len();
            *yk = x;
            w *= wx * (x * x).exp();
        }
        let th: Vec<f64> = (0..k)
            .map(|i| centre[axes[i]] + std::f64::consts::SQRT_2 * (0..k).map(|j| l[(i, j)] * y[j]).sum::<f64>())
            .collect();
        out.push((th, w * std::f64::consts::SQRT_2.powi(k as i32) * det));
    }
    Ok(out)
}
