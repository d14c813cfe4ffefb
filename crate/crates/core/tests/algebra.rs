use nalgebra::DMatrix;
use num_complex::Complex64 as C64;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use uhyper::clifford_catalog::{build_module, catalog, rho, validate_module, Signature};
use uhyper::group_core::{dilate, dilation_matrix, jet_of, p_form, FlowSide, GroupPoint, GroupStructure};
use uhyper::poly::Poly;
use uhyper::schwartz_testfn::{GaussMixture, GaussPoly};

fn vecs(rng: &mut ChaCha8Rng, n: usize, s: f64) -> Vec<f64> {
    (0..n).map(|_| rng.random_range(-s..s)).collect()
}

fn expm_series(a: &DMatrix<f64>) -> DMatrix<f64> {
    // scaling and squaring with a 20 term Taylor sum
    let k = (a.amax().max(1.0).log2().ceil() as i32 + 4).max(0);
    let b = a / 2f64.powi(k);
    let d = a.nrows();
    let mut term = DMatrix::<f64>::identity(d, d);
    let mut sum = term.clone();
    for i in 1..20 {
        term = &term * &b / i as f64;
        sum += &term;
    }
    for _ in 0..k {
        sum = &sum * &sum;
    }
    sum
}

fn sig_strategy() -> impl Strategy<Value = Signature> {
    prop::sample::select(catalog())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn clifford_square(sig in sig_strategy(), seed in any::<u64>()) {
        let m = build_module(sig).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let eta = vecs(&mut rng, sig.dim_z(), 2.0);
        let r = rho(&m, &eta).unwrap();
        let d = sig.dim_v();
        let res = &r * &r + DMatrix::<f64>::identity(d, d) * sig.form(&eta);
        prop_assert!(res.amax() <= 1e-12);
        let tr = &m.tau * &r;
        prop_assert!((&tr + tr.transpose()).amax() <= 1e-12);
    }

    #[test]
    fn block_identity(sig in sig_strategy(), seed in any::<u64>()) {
        let m = build_module(sig).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let eta = vecs(&mut rng, sig.dim_z(), 2.0);
        let (r, n) = (sig.r, sig.n);
        let mut plus = eta.clone();
        let mut minus = eta.clone();
        for k in 0..eta.len() {
            if k < r { minus[k] = 0.0 } else { plus[k] = 0.0 }
        }
        let rp = rho(&m, &plus).unwrap();
        let rm = rho(&m, &minus).unwrap();
        let a = rp.view((0, 0), (n, n)).clone_owned();
        let dd = rp.view((n, n), (n, n)).clone_owned();
        let b = rm.view((0, n), (n, n)).clone_owned();
        prop_assert!((&a * &b + &b * &dd).amax() <= 1e-12);
        let mm: f64 = minus.iter().map(|v| v * v).sum();
        prop_assert!((b.transpose() * &b - DMatrix::<f64>::identity(n, n) * mm).amax() <= 1e-12);
    }

    #[test]
    fn omega_identities(sig in sig_strategy(), seed in any::<u64>()) {
        let g = GroupStructure::from_signature(sig).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let eta = vecs(&mut rng, sig.dim_z(), 2.0);
        let o = g.omega(&eta).unwrap();
        let tau = &g.module.tau;
        prop_assert!((&o + o.transpose()).amax() == 0.0);
        let lhs = o.transpose() * tau * &o;
        prop_assert!((lhs - tau * (sig.form(&eta) / 4.0)).amax() <= 1e-12);
        let to = tau * &o;
        let d = sig.dim_v();
        prop_assert!((&to * &to + DMatrix::<f64>::identity(d, d) * (sig.form(&eta) / 4.0)).amax() <= 1e-12);
    }

    #[test]
    fn flows_match_series_and_preserve_p(sig in sig_strategy(), seed in any::<u64>()) {
        let g = GroupStructure::from_signature(sig).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let eta = vecs(&mut rng, sig.dim_z(), 1.5);
        let t = rng.random_range(-3.0..3.0);
        let tau = g.module.tau.clone();
        let o = g.omega(&eta).unwrap();
        let right = g.exp_flow(&eta, t, FlowSide::Right).unwrap();
        let left = g.exp_flow(&eta, t, FlowSide::Left).unwrap();
        let ser = expm_series(&(&o * &tau * t));
        prop_assert!((&right - &ser).amax() <= 1e-12 * ser.amax().max(1.0));
        let ser_l = expm_series(&(&tau * &o * t));
        prop_assert!((&left - &ser_l).amax() <= 1e-12 * ser_l.amax().max(1.0));
        let left_m = g.exp_flow(&eta, -t, FlowSide::Left).unwrap();
        prop_assert!((&left_m * &tau * &right - &tau).amax() <= 1e-10 * right.amax().powi(2).max(1.0));
        let xi = nalgebra::DVector::from_vec(vecs(&mut rng, sig.dim_v(), 2.0));
        let img = &right * &xi;
        let (p0, p1) = (p_form(xi.as_slice()), p_form(img.as_slice()));
        prop_assert!((p0 - p1).abs() <= 1e-10 * img.amax().powi(2).max(1.0));
    }

    #[test]
    fn dilation_is_automorphism(sig in sig_strategy(), seed in any::<u64>()) {
        let g = GroupStructure::from_signature(sig).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let s = rng.random_range(0.1..3.0);
        let p = GroupPoint::new(vecs(&mut rng, sig.dim_v(), 2.0), vecs(&mut rng, sig.dim_z(), 2.0));
        let q = GroupPoint::new(vecs(&mut rng, sig.dim_v(), 2.0), vecs(&mut rng, sig.dim_z(), 2.0));
        let a = dilate(s, &g.group_mul(&p, &q).unwrap()).unwrap();
        let b = g.group_mul(&dilate(s, &p).unwrap(), &dilate(s, &q).unwrap()).unwrap();
        for (u, v) in a.concat().iter().zip(b.concat()) {
            prop_assert!((u - v).abs() <= 1e-12 * u.abs().max(1.0));
        }
    }
}

#[test]
fn every_catalog_entry_validates_and_rho_eigenvalues() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for sig in catalog() {
        let m = build_module(sig).unwrap();
        let rep = validate_module(&m);
        assert!(rep.pass, "{sig:?} {rep:?}");
        if sig.r == 0 {
            continue;
        }
        let g = GroupStructure::new(m);
        for _ in 0..20 {
            let mut eta = vecs(&mut rng, sig.dim_z(), 1.0);
            eta[0] += 3.0;
            let f = sig.form(&eta);
            assert!(f > 0.0);
            let to = &g.module.tau * g.omega(&eta).unwrap();
            let ev = to.complex_eigenvalues();
            for z in ev.iter() {
                assert!(z.re.abs() <= 1e-10);
                assert!((z.im.abs() - f.sqrt() / 2.0).abs() <= 1e-10);
            }
            let pos = ev.iter().filter(|z| z.im > 0.0).count();
            assert_eq!(pos, sig.n);
        }
    }
}

fn probe(d: usize, seed: u64) -> GaussPoly {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let b = DMatrix::from_fn(d, d, |_, _| rng.random_range(-0.3..0.3));
    let a = &b * b.transpose() + DMatrix::<f64>::identity(d, d);
    let shift = vecs(&mut rng, d, 0.5);
    let mut p = Poly::one(d);
    p.add_assign(&Poly::var(d, 0).scale(C64::new(0.5, 0.2)));
    p.add_assign(&Poly::var(d, d - 1).mul(&Poly::var(d, 1)).scale(C64::new(-0.3, 0.0)));
    GaussPoly::gaussian(&a, &shift).unwrap().mul_poly(&p)
}

/// Fourth order central differences of the vector field composition.
fn fd_delta(g: &GroupStructure, f: &dyn Fn(&[f64]) -> C64, u: &[f64], h: f64) -> C64 {
    let sig = g.sig();
    let fields = g.horizontal_fields();
    let mut acc = C64::new(0.0, 0.0);
    for (j, fl) in fields.iter().enumerate() {
        // X_j f(u) = d/dt f(u exp(t X_j)) at 0; u exp(t e_j) is the curve
        let curve = |t: f64| {
            let p = GroupPoint::new(u[..sig.dim_v()].to_vec(), u[sig.dim_v()..].to_vec());
            let mut e = vec![0.0; sig.dim_v()];
            e[j] = t;
            let q = GroupPoint::new(e, vec![0.0; sig.dim_z()]);
            f(&g.group_mul(&p, &q).unwrap().concat())
        };
        let _ = fl;
        let d2 = (-curve(2.0 * h) + curve(h) * 16.0 - curve(0.0) * 30.0 + curve(-h) * 16.0 - curve(-2.0 * h))
            / (12.0 * h * h);
        acc += if j < sig.n { d2 } else { -d2 };
    }
    acc
}

#[test]
fn delta_matches_finite_differences() {
    let g = GroupStructure::from_signature(Signature::new(0, 1, 1)).unwrap();
    let phi = GaussPoly::isotropic(1.0 / 2f64.sqrt(), &[0.0; 3]);
    let dphi = g.apply_delta_rs(&phi).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..20 {
        let u = vecs(&mut rng, 3, 1.5);
        let fd = fd_delta(&g, &|v| phi.evaluate(v), &u, 1e-3);
        assert!((fd - dphi.evaluate(&u)).norm() <= 1e-6);
    }
}

#[test]
fn delta_is_left_invariant_and_homogeneous() {
    for sig in [Signature::new(0, 1, 1), Signature::new(0, 2, 2), Signature::new(1, 1, 2)] {
        let g = GroupStructure::from_signature(sig).unwrap();
        let d = sig.dim();
        let phi = probe(d, 3);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let gp = GroupPoint::new(vecs(&mut rng, sig.dim_v(), 1.0), vecs(&mut rng, sig.dim_z(), 1.0));
        let (a, t) = g.left_translation_affine(&gp).unwrap();
        let lhs = g.apply_delta_rs(&phi.precompose_affine(&a, &t).unwrap()).unwrap();
        let rhs = g.apply_delta_rs(&phi).unwrap().precompose_affine(&a, &t).unwrap();
        let s = 1.7;
        let dm = dilation_matrix(sig, s);
        let hl = g.apply_delta_rs(&phi.precompose_affine(&dm, &vec![0.0; d]).unwrap()).unwrap();
        let hr = g.apply_delta_rs(&phi).unwrap().precompose_affine(&dm, &vec![0.0; d]).unwrap();
        for _ in 0..20 {
            let u = vecs(&mut rng, d, 1.0);
            assert!((lhs.evaluate(&u) - rhs.evaluate(&u)).norm() <= 1e-8);
            assert!((hl.evaluate(&u) - hr.evaluate(&u) * (s * s)).norm() <= 1e-8);
        }
    }
}

#[test]
fn fourier_intertwines_delta_and_g() {
    for sig in catalog() {
        let g = GroupStructure::from_signature(sig).unwrap();
        let d = sig.dim();
        let phi = probe(d, 21);
        let lhs = g.apply_delta_rs(&phi).unwrap().fourier().unwrap();
        let fphi = GaussMixture::single(phi.fourier().unwrap());
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..10 {
            let u = vecs(&mut rng, d, 1.5);
            let (xi, eta) = u.split_at(sig.dim_v());
            let jet = jet_of(&fphi, &u, sig.dim_v());
            let rhs = g.apply_g_rs(&jet, xi, eta).unwrap();
            let l = lhs.evaluate(&u);
            assert!((l - rhs).norm() <= 1e-8 * l.norm().max(1.0), "{sig:?}: {l} vs {rhs}");
        }
    }
}

#[test]
fn plane_wave_symbol() {
    // Delta e^{i(x.xi + z.eta)} = (-P(xi) - <eta,eta> P(x)/4 + x^T rho(eta) xi) e^{...}
    let eps = 1e-12;
    for sig in catalog() {
        let g = GroupStructure::from_signature(sig).unwrap();
        let d = sig.dim();
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let w = vecs(&mut rng, d, 1.0);
        let quad = DMatrix::<C64>::identity(d, d) * C64::new(eps, 0.0);
        let lin = nalgebra::DVector::from_iterator(d, w.iter().map(|v| C64::new(0.0, *v)));
        let phi = GaussPoly::from_parts(quad, lin, C64::new(0.0, 0.0), Poly::one(d)).unwrap();
        let out = g.apply_delta_rs(&phi).unwrap();
        let (xi, eta) = w.split_at(sig.dim_v());
        let r = g.rho(eta).unwrap();
        for _ in 0..5 {
            let u = vecs(&mut rng, d, 1.0);
            let x = &u[..sig.dim_v()];
            let mut xr = 0.0;
            for i in 0..x.len() {
                for j in 0..x.len() {
                    xr += x[i] * r[(i, j)] * xi[j];
                }
            }
            let sym = -p_form(xi) - sig.form(eta) * p_form(x) / 4.0 + xr;
            let got = out.evaluate(&u) / phi.evaluate(&u);
            assert!((got - C64::new(sym, 0.0)).norm() <= 1e-8, "{sig:?}");
        }
    }
}
