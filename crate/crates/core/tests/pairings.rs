use nalgebra::DMatrix;
use num_complex::Complex64 as C64;
use proptest::prelude::*;
use uhyper::clifford_catalog::Signature;
use uhyper::error::Error;
use uhyper::group_core::GroupStructure;
use uhyper::kernel_eval::KernelSelector;
use uhyper::pairing::{pair_k, pair_k_with, pair_offcone, pseudo_pair_n2, KBudget};
use uhyper::poly::Poly;
use uhyper::schwartz_testfn::{probe, GaussPoly};

const HEIS: Signature = Signature { r: 0, s: 1, n: 1 };

fn rel(a: C64, b: C64) -> f64 {
    (a - b).norm() / b.norm().max(1e-300)
}

#[test]
fn frozen_heisenberg_pairing() {
    // 30 digit reference for the centred unit Gaussian on the Heisenberg group
    let phi = GaussPoly::isotropic(1.0, &[0.0; 3]);
    let r = pair_k(HEIS, &phi, KernelSelector::plus()).unwrap();
    let want = C64::new(0.0, 1.3375438980748562129);
    assert!(rel(r.value, want) < 1e-6, "{}", r.value);
    assert!(r.est_error < 1e-2 * want.norm());
}

#[test]
fn heisenberg_delta_reproduction() {
    let g = GroupStructure::from_signature(HEIS).unwrap();
    for seed in 1..4 {
        let phi = probe(3, seed);
        let r = pair_k(HEIS, &g.apply_delta_rs(&phi).unwrap(), KernelSelector::half()).unwrap();
        let phi0 = phi.evaluate(&[0.0; 3]);
        assert!(rel(r.value, phi0) < 1e-3, "seed {seed}: {} vs {phi0}", r.value);
    }
}

fn doubled() -> KBudget {
    let b = KBudget::for_s(1);
    KBudget {
        radial_levels: 2 * b.radial_levels,
        radial_panels: 2 * b.radial_panels,
        radial_nodes: 2 * b.radial_nodes,
        sphere: 2 * b.sphere,
        rho_nodes: 2 * b.rho_nodes,
    }
}

#[test]
fn linear_in_the_test_function() {
    // the radial cutoff depends on the polynomial degree, so the three
    // pairings use different grids and agree only to quadrature accuracy
    let g = probe(3, 7);
    let p = Poly::var(3, 1).scale(C64::new(0.0, 0.8));
    let sel = KernelSelector::plus();
    let a = pair_k_with(HEIS, &g, sel, doubled()).unwrap().value;
    let b = pair_k_with(HEIS, &g.mul_poly(&p), sel, doubled()).unwrap().value;
    let mut sum = Poly::one(3);
    sum.add_assign(&p);
    let c = pair_k_with(HEIS, &g.mul_poly(&sum), sel, doubled()).unwrap().value;
    assert!(rel(c, a + b) < 1e-6, "{c} {}", a + b);
    let d = pair_k_with(HEIS, &g.scale(C64::new(-2.0, 0.5)), sel, doubled()).unwrap().value;
    assert!(rel(d, a * C64::new(-2.0, 0.5)) < 1e-12);
}

#[test]
fn error_estimate_bounds_the_refinement() {
    let g = probe(3, 7);
    let sel = KernelSelector::plus();
    let base = pair_k(HEIS, &g, sel).unwrap();
    let fine = pair_k_with(HEIS, &g, sel, doubled()).unwrap();
    assert!((base.value - fine.value).norm() <= 2.0 * base.est_error);
    assert!(fine.est_error < base.est_error);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(8))]

    #[test]
    fn even_under_reflection(seed in 0u64..10_000) {
        // the symbols depend on P(xi) and |theta| only
        let phi = probe(3, seed);
        let refl = phi.precompose_affine(&(-DMatrix::<f64>::identity(3, 3)), &[0.0; 3]).unwrap();
        let sel = KernelSelector::constant(C64::new(0.25, 0.0), C64::new(0.75, 0.0)).unwrap();
        let a = pair_k(HEIS, &phi, sel).unwrap().value;
        let b = pair_k(HEIS, &refl, sel).unwrap().value;
        prop_assert!(rel(a, b) < 1e-10);
    }
}

#[test]
fn offcone_rejects_mass_on_the_cone() {
    let sig = Signature::new(0, 1, 2);
    assert_eq!(pair_offcone(sig, &probe(5, 1), 8), Err(Error::OnConeRegion));
    assert!(matches!(pair_offcone(sig, &probe(4, 1), 8), Err(Error::DimensionMismatch { .. })));
}

#[test]
fn pseudo_pairing_sides_agree() {
    let sig = Signature::new(0, 1, 2);
    let g = GroupStructure::from_signature(sig).unwrap();
    let phi = GaussPoly::isotropic(1.0, &[0.0; 5]);
    let (lhs, rhs) = pseudo_pair_n2(sig, &phi, &g.apply_delta_rs(&phi).unwrap()).unwrap();
    assert!(rel(lhs, rhs) < 1e-6, "{lhs} {rhs}");
    let h = Signature::new(0, 1, 1);
    let p3 = GaussPoly::isotropic(1.0, &[0.0; 3]);
    assert_eq!(pseudo_pair_n2(h, &p3, &p3), Err(Error::UnsupportedN(1)));
}
