//! Gamma at half integers, Bessel J and Y, Struve H for orders nu = (n-1)/2.
//!
//! Everything goes through the Poisson type representations
//! J + iH = 2 (v/2)^nu / (sqrt(pi) Gamma(nu + 1/2)) int_0^1 (1-r^2)^{nu-1/2} e^{ivr} dr
//! which hold for nu > -1/2, so nu = 0 is covered as well.

use num_complex::Complex64;
use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::quad;

/// Order nu = two_nu / 2.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct HalfIntOrder {
    pub two_nu: u32,
}

impl HalfIntOrder {
    pub fn new(two_nu: u32) -> Self {
        Self { two_nu }
    }

    /// The order (n-1)/2 attached to a module of dimension 2n.
    pub fn for_n(n: usize) -> Self {
        Self { two_nu: n as u32 - 1 }
    }

    pub fn nu(self) -> f64 {
        self.two_nu as f64 / 2.0
    }
}

/// Gamma(two_k / 2) from Gamma(1/2) = sqrt(pi), Gamma(1) = 1.
pub fn gamma_half(two_k: u32) -> Result<f64> {
    if two_k == 0 {
        return Err(Error::NonPositiveArgument(0.0));
    }
    let (mut g, mut x) = if two_k % 2 == 1 {
        (PI.sqrt(), 0.5)
    } else {
        (1.0, 1.0)
    };
    let target = two_k as f64 / 2.0;
    while x < target {
        g *= x;
        x += 1.0;
    }
    Ok(g)
}

/// Gamma at a positive half integer given as f64.
pub(crate) fn gamma_h(x: f64) -> f64 {
    let t = (2.0 * x).round();
    debug_assert!((2.0 * x - t).abs() < 1e-12);
    gamma_half(t as u32).expect("positive half integer")
}

const MAX_NODES: usize = 1024;

/// int_0^1 (1-r^2)^a g(r) dr by Gauss-Jacobi with `m` nodes (exact weight at r = 1).
pub(crate) fn jacobi_unit<F: Fn(f64) -> Complex64>(a: f64, m: usize, g: F) -> Complex64 {
    let rule = quad::jacobi(m, a, 0.0);
    let scale = 0.5f64.powf(a + 1.0);
    let mut acc = Complex64::new(0.0, 0.0);
    for (y, w) in rule.pairs() {
        let r = 0.5 * (1.0 + y);
        acc += g(r) * (w * (1.0 + r).powf(a));
    }
    acc * scale
}

/// Node count that resolves e^{ivr} on [0, 1] to machine precision.
pub(crate) fn nodes_for_freq(v: f64) -> usize {
    let m = (0.35 * v.abs() + 32.0) as usize;
    m.next_power_of_two().min(MAX_NODES)
}

/// Doubles the node count until two successive values differ by < 1e-12.
pub(crate) fn adaptive<F: Fn(usize) -> Complex64>(start: usize, f: F) -> Complex64 {
    let mut m = start;
    let mut prev = f(m);
    while m < MAX_NODES {
        m *= 2;
        let cur = f(m);
        if (cur - prev).norm() < 1e-12 * cur.norm().max(1.0) {
            return cur;
        }
        prev = cur;
    }
    prev
}

/// int_0^1 (1-r^2)^{(n-2)/2} e^{ivr} dr.
pub fn jh_rho_integral(n: usize, v: f64) -> Complex64 {
    let a = (n as f64 - 2.0) / 2.0;
    adaptive(nodes_for_freq(v) / 2, |m| {
        jacobi_unit(a, m, |r| Complex64::from_polar(1.0, v * r))
    })
}

fn prefactor(nu: HalfIntOrder, v: f64) -> f64 {
    let nu_f = nu.nu();
    2.0 * (v.abs() / 2.0).powf(nu_f) / (PI.sqrt() * gamma_h(nu_f + 0.5))
}

fn combo(nu: HalfIntOrder, v: f64) -> Complex64 {
    let n = nu.two_nu as usize + 1;
    jh_rho_integral(n, v) * prefactor(nu, v)
}

/// J_nu(v). For v < 0 this is the even continuation J_nu(|v|).
pub fn bessel_j(nu: HalfIntOrder, v: f64) -> f64 {
    combo(nu, v).re
}

/// Struve H_nu(v). For v < 0 this is the odd continuation -H_nu(|v|).
pub fn struve_h(nu: HalfIntOrder, v: f64) -> f64 {
    combo(nu, v).im
}

/// J_{(n-1)/2}(v) + i H_{(n-1)/2}(v); conj(jh_combo(n, -v)) = jh_combo(n, v).
pub fn jh_combo(n: usize, v: f64) -> Complex64 {
    combo(HalfIntOrder::for_n(n), v)
}

/// int_0^inf e^{-v r} (1+r^2)^{nu-1/2} dr for v > 0.
fn laplace_part(nu: HalfIntOrder, v: f64) -> f64 {
    let a = nu.nu() - 0.5;
    // t = v r; int_0^inf e^{-t} (1 + t^2/v^2)^a dt / v
    let g = |t: f64| (1.0 + (t / v) * (t / v)).powf(a);
    let t_end = 40.0;
    let breaks = quad::graded_breaks(0.5 * v.min(1.0), t_end);
    let eval = |m: usize| {
        let mut s = 0.0;
        for (t, w) in quad::composite(&breaks, m) {
            s += w * (-t).exp() * g(t);
        }
        let lag = quad::laguerre(2 * m, 0.0);
        let mut tail = 0.0;
        for (u, w) in lag.pairs() {
            tail += w * g(t_end + u);
        }
        (s + (-t_end).exp() * tail) / v
    };
    adaptive(8, |m| Complex64::new(eval(m), 0.0)).re
}

/// Y_nu(v) = H_nu(v) - 2 (v/2)^nu / (Gamma(nu+1/2) Gamma(1/2)) int_0^inf e^{-vr}(1+r^2)^{nu-1/2} dr.
pub fn bessel_y(nu: HalfIntOrder, v: f64) -> Result<f64> {
    if v <= 0.0 {
        return Err(Error::NonPositiveArgument(v));
    }
    Ok(struve_h(nu, v) - h_minus_y(nu, v))
}

/// H_nu(v) - Y_nu(v) straight from the Laplace integral.
pub fn h_minus_y(nu: HalfIntOrder, v: f64) -> f64 {
    prefactor(nu, v) * laplace_part(nu, v)
}

/// Residuals of v^2 f'' + v f' + (v^2 - nu^2) f = rhs for f = J, Y (rhs = 0) and
/// f = H (rhs = 4 (v/2)^{nu+1} / (sqrt(pi) Gamma(nu + 1/2))), with fourth order
/// central differences of step h. Requires v > 2h.
pub fn ode_residuals(nu: HalfIntOrder, v: f64, h: f64) -> Result<[f64; 3]> {
    if v <= 2.0 * h {
        return Err(Error::NonPositiveArgument(v - 2.0 * h));
    }
    let x = nu.nu();
    let stencil = |f: &dyn Fn(f64) -> Result<f64>| -> Result<f64> {
        let fm2 = f(v - 2.0 * h)?;
        let fm1 = f(v - h)?;
        let f0 = f(v)?;
        let fp1 = f(v + h)?;
        let fp2 = f(v + 2.0 * h)?;
        let d1 = (fm2 - 8.0 * fm1 + 8.0 * fp1 - fp2) / (12.0 * h);
        let d2 = (-fm2 + 16.0 * fm1 - 30.0 * f0 + 16.0 * fp1 - fp2) / (12.0 * h * h);
        Ok(v * v * d2 + v * d1 + (v * v - x * x) * f0)
    };
    let rj = stencil(&|t| Ok(bessel_j(nu, t)))?;
    let ry = stencil(&|t| bessel_y(nu, t))?;
    let rhs = 4.0 * (v / 2.0).powf(x + 1.0) / (PI.sqrt() * gamma_half(nu.two_nu + 1)?);
    let rh = stencil(&|t| Ok(struve_h(nu, t)))? - rhs;
    Ok([rj, ry, rh])
}
