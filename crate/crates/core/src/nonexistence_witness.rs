//! A non-negative Schwartz function in the kernel of G_{r,s} for r > 0.
//!
//! For timelike eta (m = <eta,eta>_{r,s} > 0) the Gaussian exp(-|xi|^2/sqrt(m))
//! is killed by A_eta = -P + (m/4) L, and averaging it over the periodic flow
//! e^{t Omega(eta) tau} also kills B_eta = -2i <Omega(eta) tau xi, grad>.
//! Multiplying by a bump in eta gives psi with G_{r,s} psi = 0, psi >= 0 and
//! int psi > 0, so no tempered fundamental solution can exist.

use std::f64::consts::PI;

use rayon::prelude::*;
use serde::Serialize;

use crate::clifford_catalog::Signature;
use crate::error::{Error, Result};
use crate::group_core::{FlowSide, GroupStructure};
use crate::poly::{Poly, C64};
use crate::quad;
use crate::schwartz_testfn::{CompiledGauss, GaussMixture, GaussPoly};

const ZERO: C64 = C64::new(0.0, 0.0);

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WitnessConfig {
    pub sig: Signature,
    pub eta0: Vec<f64>,
    pub delta: f64,
    pub flow_nodes: usize,
    /// Grid points per xi axis on [-6 sigma, 6 sigma].
    pub grid_xi: usize,
    /// Grid points per eta axis on the bounding box of the ball.
    pub grid_eta: usize,
}

impl WitnessConfig {
    pub fn new(sig: Signature, eta0: Vec<f64>, delta: f64) -> Self {
        Self { sig, eta0, delta, flow_nodes: 64, grid_xi: 7, grid_eta: 5 }
    }

    /// Minimum of <eta, eta>_{r,s} over the closed ball B(eta0, delta).
    pub fn ball_margin(&self) -> f64 {
        let d = self.eta0.len();
        let form = |e: &[f64]| self.sig.form(e);
        let mut best = form(&self.eta0);
        // indefinite or negative forms attain the minimum on the sphere
        let dirs: Vec<Vec<f64>> = match d {
            1 => vec![vec![1.0], vec![-1.0]],
            2 => (0..720).map(|k| {
                let t = 2.0 * PI * k as f64 / 720.0;
                vec![t.cos(), t.sin()]
            }).collect(),
            _ => quad::sphere(3.min(d), 48).into_iter().map(|(w, _)| {
                let mut v = w;
                v.resize(d, 0.0);
                v
            }).collect(),
        };
        for u in dirs {
            let e: Vec<f64> = self.eta0.iter().zip(&u).map(|(a, b)| a + self.delta * b).collect();
            best = best.min(form(&e));
        }
        best
    }

    fn validate(&self) -> Result<()> {
        if self.eta0.len() != self.sig.dim_z() {
            return Err(Error::DimensionMismatch { expected: self.sig.dim_z(), got: self.eta0.len() });
        }
        if self.delta <= 0.0 {
            return Err(Error::NonPositiveArgument(self.delta));
        }
        let m = self.ball_margin();
        if m <= 0.0 {
            return Err(Error::BumpOutsideK(m));
        }
        Ok(())
    }
}

/// A_eta = -P + (<eta,eta>/4) L.
pub fn a_eta_apply(g: &GroupStructure, phi: &GaussMixture, eta: &[f64]) -> Result<GaussMixture> {
    let sig = g.sig();
    check_xi(sig, phi)?;
    check_eta(sig, eta)?;
    let m = sig.form(eta);
    let n = sig.n;
    let p = p_poly(n);
    Ok(phi.map(|t| {
        let mut poly = t.poly.mul(&p).scale(C64::new(-1.0, 0.0));
        poly.add_assign(&t.ultra_laplacian(n).poly.scale(C64::new(m / 4.0, 0.0)));
        GaussPoly { poly, ..t.clone() }
    }))
}

/// B_eta = -2i <Omega(eta) tau xi, grad>.
pub fn b_eta_apply(g: &GroupStructure, phi: &GaussMixture, eta: &[f64]) -> Result<GaussMixture> {
    let sig = g.sig();
    check_xi(sig, phi)?;
    let x = g.omega(eta)? * &g.module.tau;
    let d = sig.dim_v();
    let field: Vec<(usize, Poly)> = (0..d)
        .map(|i| {
            let coeffs: Vec<C64> = (0..d).map(|j| C64::new(0.0, -2.0 * x[(i, j)])).collect();
            (i, Poly::linear(&coeffs, ZERO))
        })
        .collect();
    Ok(phi.map(|t| t.vector_field(&field)))
}

/// G_{r,s} at fixed eta, which equals A_eta + B_eta.
pub fn g_eta_apply(g: &GroupStructure, phi: &GaussMixture, eta: &[f64]) -> Result<GaussMixture> {
    let a = a_eta_apply(g, phi, eta)?;
    let b = b_eta_apply(g, phi, eta)?;
    // same exponents term by term, so polynomials can be merged
    let terms = a
        .terms
        .iter()
        .zip(&b.terms)
        .map(|(x, y)| GaussPoly { poly: x.poly.add(&y.poly), ..x.clone() })
        .collect();
    Ok(GaussMixture { dim: a.dim, terms })
}

fn p_poly(n: usize) -> Poly {
    let d = 2 * n;
    let mut p = Poly::zero(d);
    for j in 0..d {
        let s = if j < n { 1.0 } else { -1.0 };
        p.add_assign(&Poly::var(d, j).mul(&Poly::var(d, j)).scale(C64::new(s, 0.0)));
    }
    p
}

fn check_xi(sig: Signature, phi: &GaussMixture) -> Result<()> {
    if phi.dim != sig.dim_v() {
        return Err(Error::DimensionMismatch { expected: sig.dim_v(), got: phi.dim });
    }
    Ok(())
}

fn check_eta(sig: Signature, eta: &[f64]) -> Result<()> {
    if eta.len() != sig.dim_z() {
        return Err(Error::DimensionMismatch { expected: sig.dim_z(), got: eta.len() });
    }
    Ok(())
}

/// phi_eta = exp(-|xi|^2 / sqrt(m)), m = <eta, eta>_{r,s} > 0.
pub fn phi_eta(sig: Signature, eta: &[f64]) -> Result<GaussPoly> {
    let m = sig.form(eta);
    if m <= 0.0 {
        return Err(Error::NonTimelikeEta(m));
    }
    let sigma = (m.sqrt() / 2.0).sqrt();
    Ok(GaussPoly::isotropic(sigma, &vec![0.0; sig.dim_v()]))
}

/// Period 4 pi / sqrt(<eta, eta>) of the flow.
pub fn flow_period(sig: Signature, eta: &[f64]) -> Result<f64> {
    let m = sig.form(eta);
    if m <= 0.0 {
        return Err(Error::NonTimelikeEta(m));
    }
    Ok(4.0 * PI / m.sqrt())
}

/// Trapezoid rule for int_0^{q} phi(e^{t Omega(eta) tau} xi) dt, nodes t_j = offset + j q / m.
pub fn d_eta_average(g: &GroupStructure, phi: &GaussPoly, eta: &[f64], nodes: usize, offset: f64) -> Result<GaussMixture> {
    let sig = g.sig();
    let q = flow_period(sig, eta)?;
    if nodes < 8 {
        return Err(Error::NonPositiveArgument(nodes as f64));
    }
    let zero = vec![0.0; sig.dim_v()];
    let mut out = GaussMixture::new(sig.dim_v());
    for (t, w) in quad::trapezoid_periodic(nodes, q, offset) {
        let m = g.exp_flow(eta, t, FlowSide::Right)?;
        out.push(phi.precompose_affine(&m, &zero)?.scale(C64::new(w, 0.0)))?;
    }
    Ok(out)
}

/// omega(eta) = exp(1 - 1/(1 - |eta - eta0|^2/delta^2)) inside the ball, 0 outside.
pub fn bump(eta0: &[f64], delta: f64, eta: &[f64]) -> f64 {
    let r2: f64 = eta.iter().zip(eta0).map(|(a, b)| (a - b) * (a - b)).sum::<f64>() / (delta * delta);
    if r2 >= 1.0 {
        0.0
    } else {
        (1.0 - 1.0 / (1.0 - r2)).exp()
    }
}

#[derive(Debug, Clone)]
pub struct WitnessFunction {
    pub cfg: WitnessConfig,
    group: GroupStructure,
}

pub fn build_witness(g: &GroupStructure, cfg: WitnessConfig) -> Result<WitnessFunction> {
    if cfg.sig != g.sig() {
        return Err(Error::InvalidCatalog(format!("config signature {:?} differs from group {:?}", cfg.sig, g.sig())));
    }
    cfg.validate()?;
    Ok(WitnessFunction { cfg, group: g.clone() })
}

impl WitnessFunction {
    pub fn omega(&self, eta: &[f64]) -> f64 {
        bump(&self.cfg.eta0, self.cfg.delta, eta)
    }

    /// D_eta phi_eta as an explicit mixture.
    pub fn slice(&self, eta: &[f64]) -> Result<GaussMixture> {
        let phi = phi_eta(self.cfg.sig, eta)?;
        d_eta_average(&self.group, &phi, eta, self.cfg.flow_nodes, 0.0)
    }

    pub fn evaluate(&self, xi: &[f64], eta: &[f64]) -> Result<f64> {
        let w = self.omega(eta);
        if w == 0.0 {
            return Ok(0.0);
        }
        Ok(w * self.slice(eta)?.evaluate(xi).re)
    }

    /// Width of phi_eta at the centre of the bump.
    pub fn sigma(&self) -> f64 {
        (self.cfg.sig.form(&self.cfg.eta0).sqrt() / 2.0).sqrt()
    }

    fn eta_grid(&self) -> Vec<Vec<f64>> {
        let k = self.cfg.grid_eta.max(1);
        let d = self.cfg.eta0.len();
        let mut out = Vec::new();
        let total = k.pow(d as u32);
        for idx in 0..total {
            let mut rem = idx;
            let e: Vec<f64> = (0..d)
                .map(|i| {
                    let j = rem % k;
                    rem /= k;
                    let t = if k == 1 { 0.0 } else { -0.95 + 1.9 * j as f64 / (k - 1) as f64 };
                    self.cfg.eta0[i] + self.cfg.delta * t
                })
                .collect();
            if self.omega(&e) > 0.0 {
                out.push(e);
            }
        }
        out
    }

    fn xi_grid(&self) -> Vec<Vec<f64>> {
        let k = self.cfg.grid_xi.max(1);
        let d = self.cfg.sig.dim_v();
        let h = 6.0 * self.sigma();
        let total = k.pow(d as u32);
        (0..total)
            .map(|idx| {
                let mut rem = idx;
                (0..d)
                    .map(|_| {
                        let j = rem % k;
                        rem /= k;
                        if k == 1 { 0.0 } else { -h + 2.0 * h * j as f64 / (k - 1) as f64 }
                    })
                    .collect()
            })
            .collect()
    }

    /// Polar rule on the bump support: radial Gauss-Legendre panels graded
    /// toward the rim, where omega is flat to all orders.
    pub fn eta_nodes(&self, radial: usize, angles: usize) -> Vec<(Vec<f64>, f64)> {
        let d = self.cfg.eta0.len();
        let dl = self.cfg.delta;
        let sph = quad::sphere(d, angles);
        let rr = quad::composite(&[0.0, 0.5, 0.75, 0.875, 0.9375, 1.0], radial);
        let mut out = Vec::with_capacity(rr.len() * sph.len());
        for &(r, wr) in &rr {
            for (u, wu) in &sph {
                let e: Vec<f64> = self.cfg.eta0.iter().zip(u).map(|(a, b)| a + dl * r * b).collect();
                out.push((e, wr * wu * (dl * r).powi(d as i32 - 1) * dl));
            }
        }
        out
    }

    /// int psi over R^{2n} x R^{r+s}; the xi-part is exact, eta by `eta_nodes`.
    pub fn integral(&self, radial: usize, angles: usize) -> Result<f64> {
        let jobs = self.eta_nodes(radial, angles);
        let vals: Result<Vec<f64>> = jobs
            .par_iter()
            .map(|(e, w)| Ok(self.omega(e) * self.slice(e)?.integrate()?.re * w))
            .collect();
        Ok(quad::pairwise_sum(&vals?))
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ResidualReport {
    pub max_residual: f64,
    pub psi_sup: f64,
    pub psi_min: f64,
    pub ratio: f64,
    pub integral: f64,
    pub integral_est_error: f64,
    /// [F^{-1} psi](0) = (2 pi)^{-(n + (r+s)/2)} int psi.
    pub inv_ft_at_0: f64,
    pub grid_points: usize,
    pub passed: bool,
}

pub const RESIDUAL_TOL: f64 = 1e-8;

/// (nodes per radial panel, sphere level) for integrals over the bump.
pub const ETA_BUDGET: (usize, usize) = (12, 24);

/// max |G_{r,s} psi| over the grid (xi within 6 sigma, eta inside the bump),
/// with G applied exactly to each slice.
pub fn certify_kernel_residual(w: &WitnessFunction) -> Result<ResidualReport> {
    let (max_residual, psi_sup, psi_min) = grid_residual(w)?;
    let integral = w.integral(ETA_BUDGET.0, ETA_BUDGET.1)?;
    let coarse = w.integral(ETA_BUDGET.0 * 3 / 4, ETA_BUDGET.1 * 3 / 4)?;
    let sig = w.cfg.sig;
    let inv_ft_at_0 = (2.0 * PI).powf(-(sig.n as f64 + sig.dim_z() as f64 / 2.0)) * integral;
    let ratio = max_residual / psi_sup;
    Ok(ResidualReport {
        max_residual,
        psi_sup,
        psi_min,
        ratio,
        integral,
        integral_est_error: (integral - coarse).abs(),
        inv_ft_at_0,
        grid_points: w.eta_grid().len() * w.xi_grid().len(),
        passed: ratio <= RESIDUAL_TOL && integral > 0.0 && psi_min >= 0.0,
    })
}

/// Grid residual max |G psi| when D_eta uses `nodes` trapezoid nodes.
pub fn residual_at_nodes(w: &WitnessFunction, nodes: usize) -> Result<f64> {
    let mut v = w.clone();
    v.cfg.flow_nodes = nodes;
    v.cfg.validate()?;
    Ok(grid_residual(&v)?.0)
}

/// Grid residual with flow_nodes/2 and with flow_nodes D_eta nodes.
pub fn residual_doubling(w: &WitnessFunction) -> Result<(f64, f64)> {
    Ok((residual_at_nodes(w, w.cfg.flow_nodes / 2)?, grid_residual(w)?.0))
}

/// (max |G psi|, max |psi|, min psi) over the grid.
fn grid_residual(w: &WitnessFunction) -> Result<(f64, f64, f64)> {
    let etas = w.eta_grid();
    let xis = w.xi_grid();
    let per_eta: Result<Vec<(f64, f64, f64)>> = etas
        .par_iter()
        .map(|e| {
            let om = w.omega(e);
            let sl = w.slice(e)?;
            let gs = g_eta_apply(&w.group, &sl, e)?;
            let cs: Vec<CompiledGauss> = sl.terms.iter().map(CompiledGauss::new).collect();
            let cg: Vec<CompiledGauss> = gs.terms.iter().map(CompiledGauss::new).collect();
            let (mut res, mut sup, mut min) = (0.0f64, 0.0f64, f64::INFINITY);
            for x in &xis {
                let v: f64 = cs.iter().map(|c| c.eval(x).re).sum::<f64>() * om;
                let r: C64 = cg.iter().map(|c| c.eval(x)).sum::<C64>() * om;
                res = res.max(r.norm());
                sup = sup.max(v.abs());
                min = min.min(v);
            }
            Ok((res, sup, min))
        })
        .collect();
    let per_eta = per_eta?;
    let max_residual = per_eta.iter().map(|x| x.0).fold(0.0, f64::max);
    let psi_sup = per_eta.iter().map(|x| x.1).fold(0.0, f64::max);
    let psi_min = per_eta.iter().map(|x| x.2).fold(f64::INFINITY, f64::min);
    Ok((max_residual, psi_sup, psi_min))
}

#[derive(Debug, Clone, Serialize)]
pub struct NonsolvabilityReport {
    pub sig: Signature,
    /// c = [F^{-1} psi](0); phi = F^{-1} psi / c.
    pub normalisation: f64,
    pub phi_at_0: f64,
    /// sup |phi| = phi(0) because psi >= 0.
    pub phi_sup: f64,
    pub delta_phi_sup: f64,
    pub sample_points: usize,
    pub residual: ResidualReport,
    pub passed: bool,
}

pub const DELTA_PHI_TOL: f64 = 1e-6;

/// phi = F^{-1} psi / [F^{-1} psi](0) satisfies phi(0) = 1 and Delta_{r,s} phi = 0,
/// so the constant sequence phi_j = phi violates the a priori estimate that local
/// solvability would require. Delta phi = F^{-1}(G psi) / c is sampled on a grid
/// of (x, z); G psi is transformed slice by slice in xi and integrated over eta.
pub fn nonsolvability_report(w: &WitnessFunction) -> Result<NonsolvabilityReport> {
    let sig = w.cfg.sig;
    if sig.r == 0 {
        return Err(Error::BumpOutsideK(w.cfg.sig.form(&w.cfg.eta0)));
    }
    let residual = certify_kernel_residual(w)?;
    let c = residual.inv_ft_at_0;
    let d = w.cfg.eta0.len();
    let (radial, angles) = ETA_BUDGET;
    let nodes = w.eta_nodes(radial, angles);
    // x on {-s, 0, s}^{2n}, z on {-1, 0, 1}^{r+s}, s = 1/sigma
    let sx = 1.0 / w.sigma();
    let dv = sig.dim_v();
    let pts_x: Vec<Vec<f64>> = (0..3usize.pow(dv as u32))
        .map(|idx| {
            let mut rem = idx;
            (0..dv).map(|_| { let j = rem % 3; rem /= 3; (j as f64 - 1.0) * sx }).collect()
        })
        .collect();
    let pts_z: Vec<Vec<f64>> = (0..3usize.pow(d as u32))
        .map(|idx| {
            let mut rem = idx;
            (0..d).map(|_| { let j = rem % 3; rem /= 3; j as f64 - 1.0 }).collect()
        })
        .collect();
    // per eta node: F_xi^{-1}(G slice) at every x, and F_xi^{-1}(slice) at 0
    let per_node: Result<Vec<(Vec<C64>, C64)>> = nodes
        .par_iter()
        .map(|(e, wt)| {
            let om = w.omega(e);
            let sl = w.slice(e)?;
            let at0 = sl.inverse_fourier()?.evaluate(&vec![0.0; sl.dim]) * (om * wt);
            let gs = g_eta_apply(&w.group, &sl, e)?;
            let inv = gs.inverse_fourier()?;
            let ci: Vec<CompiledGauss> = inv.terms.iter().map(CompiledGauss::new).collect();
            let vals = pts_x.iter().map(|x| ci.iter().map(|c| c.eval(x)).sum::<C64>() * (om * wt)).collect();
            Ok((vals, at0))
        })
        .collect();
    let per_node = per_node?;
    let kx = (2.0 * PI).powf(sig.n as f64);
    let norm = (2.0 * PI).powf(-(sig.dim() as f64) / 2.0) * kx / c;
    let mut delta_phi_sup = 0.0f64;
    for (ix, _) in pts_x.iter().enumerate() {
        for z in &pts_z {
            let mut acc = ZERO;
            for ((e, _), (vals, _)) in nodes.iter().zip(&per_node) {
                let ph: f64 = z.iter().zip(e).map(|(a, b)| a * b).sum();
                acc += vals[ix] * C64::from_polar(1.0, ph);
            }
            delta_phi_sup = delta_phi_sup.max((acc * norm).norm());
        }
    }
    let at0: C64 = per_node.iter().map(|x| x.1).sum();
    let phi_at_0 = (at0 * norm).re;
    let passed = residual.passed && delta_phi_sup <= DELTA_PHI_TOL && c > 0.0 && (phi_at_0 - 1.0).abs() <= 1e-6;
    Ok(NonsolvabilityReport {
        sig,
        normalisation: c,
        phi_at_0,
        phi_sup: phi_at_0,
        delta_phi_sup,
        sample_points: pts_x.len() * pts_z.len(),
        residual,
        passed,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::group_core::jet_of;
    use crate::schwartz_testfn::probe;

    fn group() -> GroupStructure {
        GroupStructure::from_signature(Signature::new(1, 1, 2)).unwrap()
    }

    #[test]
    fn split_operator_matches_pointwise_formula() {
        let g = group();
        let phi = GaussMixture::single(probe(4, 3));
        let eta = [1.7, -0.4];
        let ga = g_eta_apply(&g, &phi, &eta).unwrap();
        for xi in [[0.1, -0.3, 0.5, 0.2], [1.0, 0.4, -0.7, 0.0], [-0.2, 0.9, 0.3, -1.1]] {
            let direct = g.apply_g_rs(&jet_of(&phi, &xi, 4), &xi, &eta).unwrap();
            let split = ga.evaluate(&xi);
            assert!((direct - split).norm() < 1e-12 * (1.0 + direct.norm()), "{direct} {split}");
        }
    }

    #[test]
    fn gaussian_is_in_the_kernel_of_a() {
        let g = group();
        let eta = [2.0, 1.0];
        let phi = GaussMixture::single(phi_eta(g.sig(), &eta).unwrap());
        let a = a_eta_apply(&g, &phi, &eta).unwrap();
        for xi in [[0.3, 0.1, -0.2, 0.8], [1.5, -1.0, 0.2, 0.4]] {
            assert!(a.evaluate(&xi).norm() < 1e-13);
        }
    }

    #[test]
    fn flow_average_is_in_the_kernel_of_b() {
        let g = group();
        let eta = [2.0, 1.0];
        let phi = probe(4, 11);
        let d = d_eta_average(&g, &phi, &eta, 64, 0.0).unwrap();
        let b = b_eta_apply(&g, &d, &eta).unwrap();
        let xi = [0.2, -0.4, 0.1, 0.3];
        assert!(b.evaluate(&xi).norm() < 1e-9 * d.evaluate(&xi).norm().max(1e-3));
        // the flow closes after one period
        let q = flow_period(g.sig(), &eta).unwrap();
        let m = g.exp_flow(&eta, q, FlowSide::Right).unwrap();
        assert!((m - nalgebra::DMatrix::<f64>::identity(4, 4)).amax() < 1e-12);
    }

    #[test]
    fn bump_and_argument_checks() {
        assert_eq!(bump(&[0.0, 0.0], 1.0, &[0.0, 0.0]), 1.0);
        assert_eq!(bump(&[0.0, 0.0], 1.0, &[1.0, 0.0]), 0.0);
        assert!(bump(&[0.0, 0.0], 1.0, &[0.0, 0.5]) > 0.0);
        let sig = Signature::new(1, 1, 2);
        assert_eq!(phi_eta(sig, &[1.0, 1.0]), Err(Error::NonTimelikeEta(0.0)));
        let g = group();
        let far = WitnessConfig::new(sig, vec![1.0, 0.5], 0.8);
        assert!(matches!(build_witness(&g, far), Err(Error::BumpOutsideK(_))));
        let phi = probe(4, 1);
        assert!(d_eta_average(&g, &phi, &[2.0, 1.0], 4, 0.0).is_err());
    }
}
