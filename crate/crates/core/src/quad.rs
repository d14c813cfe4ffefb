//! Cached Gauss rules and a few composite helpers.
//!
//! Nodes come from `gauss-quad`; this module only caches them and maps
//! them onto intervals. Jacobi rules are always built with an even node
//! count because the upstream Golub-Welsch code pins the middle node of
//! odd rules to zero.

use std::collections::HashMap;
use std::num::NonZeroUsize;
use std::sync::{Arc, Mutex, OnceLock};

use gauss_quad::{FiniteAboveNegOneF64, GaussHermite, GaussJacobi, GaussLaguerre, GaussLegendre};

/// Nodes and weights of a one dimensional rule.
#[derive(Debug, Clone)]
pub struct Rule {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl Rule {
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn pairs(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.nodes.iter().copied().zip(self.weights.iter().copied())
    }
}

#[derive(Hash, PartialEq, Eq, Clone, Copy)]
enum Key {
    Legendre(usize),
    Jacobi(usize, u64, u64),
    Hermite(usize),
    Laguerre(usize, u64),
}

fn cache() -> &'static Mutex<HashMap<Key, Arc<Rule>>> {
    static CACHE: OnceLock<Mutex<HashMap<Key, Arc<Rule>>>> = OnceLock::new();
    CACHE.get_or_init(|| Mutex::new(HashMap::new()))
}

fn cached(key: Key, build: impl FnOnce() -> Rule) -> Arc<Rule> {
    if let Some(r) = cache().lock().unwrap().get(&key) {
        return r.clone();
    }
    let rule = Arc::new(build());
    cache().lock().unwrap().entry(key).or_insert(rule).clone()
}

fn nz(n: usize) -> NonZeroUsize {
    NonZeroUsize::new(n.max(1)).unwrap()
}

fn param(a: f64) -> FiniteAboveNegOneF64 {
    FiniteAboveNegOneF64::new(a).expect("Jacobi/Laguerre exponent must exceed -1")
}

fn from_pairs(p: &[(f64, f64)]) -> Rule {
    let mut v: Vec<(f64, f64)> = p.to_vec();
    v.sort_by(|a, b| a.0.total_cmp(&b.0));
    Rule {
        nodes: v.iter().map(|x| x.0).collect(),
        weights: v.iter().map(|x| x.1).collect(),
    }
}

/// Gauss-Legendre on [-1, 1].
pub fn legendre(n: usize) -> Arc<Rule> {
    cached(Key::Legendre(n), || {
        from_pairs(GaussLegendre::new(nz(n)).as_node_weight_pairs())
    })
}

/// Gauss-Jacobi on [-1, 1] with weight (1-x)^alpha (1+x)^beta.
pub fn jacobi(n: usize, alpha: f64, beta: f64) -> Arc<Rule> {
    let n = n + (n % 2);
    if alpha == 0.0 && beta == 0.0 {
        return legendre(n);
    }
    cached(Key::Jacobi(n, alpha.to_bits(), beta.to_bits()), || {
        from_pairs(GaussJacobi::new(nz(n), param(alpha), param(beta)).as_node_weight_pairs())
    })
}

/// Gauss-Hermite with weight exp(-x^2).
pub fn hermite(n: usize) -> Arc<Rule> {
    cached(Key::Hermite(n), || {
        from_pairs(GaussHermite::new(nz(n)).as_node_weight_pairs())
    })
}

/// Generalised Gauss-Laguerre with weight x^alpha exp(-x) on [0, inf).
pub fn laguerre(n: usize, alpha: f64) -> Arc<Rule> {
    cached(Key::Laguerre(n, alpha.to_bits()), || {
        from_pairs(GaussLaguerre::new(nz(n), param(alpha)).as_node_weight_pairs())
    })
}

/// Legendre rule mapped to [a, b].
pub fn legendre_on(n: usize, a: f64, b: f64) -> Vec<(f64, f64)> {
    let r = legendre(n);
    let h = 0.5 * (b - a);
    let m = 0.5 * (a + b);
    r.pairs().map(|(x, w)| (m + h * x, h * w)).collect()
}

/// Composite Legendre over consecutive breakpoints.
pub fn composite(breaks: &[f64], n: usize) -> Vec<(f64, f64)> {
    breaks
        .windows(2)
        .flat_map(|w| legendre_on(n, w[0], w[1]))
        .collect()
}

/// Breakpoints 0, h, 2h, 4h, ... capped at `end`, used for integrands with
/// structure at scale `h` near the origin.
pub fn graded_breaks(h: f64, end: f64) -> Vec<f64> {
    let mut b = vec![0.0];
    let mut x = h.min(end);
    while x < end {
        b.push(x);
        x *= 2.0;
    }
    b.push(end);
    b
}

/// Breakpoints end*2^-levels, ..., end/2, end with a first panel [0, end*2^-levels].
pub fn geometric_to_zero(end: f64, levels: usize) -> Vec<f64> {
    let mut b = vec![0.0];
    for k in (0..levels).rev() {
        b.push(end * 0.5f64.powi(k as i32 + 1));
    }
    b.push(end);
    b
}

/// Equispaced periodic trapezoid nodes on [0, period).
pub fn trapezoid_periodic(m: usize, period: f64, offset: f64) -> Vec<(f64, f64)> {
    let h = period / m as f64;
    (0..m).map(|j| (offset + j as f64 * h, h)).collect()
}

/// Product rules on the unit sphere S^{d-1} for d = 1, 2, 3.
/// Weights sum to the sphere area.
pub fn sphere(d: usize, level: usize) -> Vec<(Vec<f64>, f64)> {
    match d {
        1 => vec![(vec![1.0], 1.0), (vec![-1.0], 1.0)],
        2 => {
            let m = level.max(4);
            let h = 2.0 * std::f64::consts::PI / m as f64;
            (0..m)
                .map(|j| {
                    let t = (j as f64 + 0.5) * h;
                    (vec![t.cos(), t.sin()], h)
                })
                .collect()
        }
        3 => {
            let m = level.max(4);
            let g = legendre(m);
            let h = 2.0 * std::f64::consts::PI / (2 * m) as f64;
            let mut out = Vec::with_capacity(2 * m * m);
            for (c, w) in g.pairs() {
                let s = (1.0 - c * c).sqrt();
                for j in 0..2 * m {
                    let t = (j as f64 + 0.5) * h;
                    out.push((vec![s * t.cos(), s * t.sin(), c], w * h));
                }
            }
            out
        }
        _ => panic!("sphere rule only for d <= 3"),
    }
}

/// Area of S^{d-1}.
pub fn sphere_area(d: usize) -> f64 {
    let pi = std::f64::consts::PI;
    match d {
        1 => 2.0,
        2 => 2.0 * pi,
        3 => 4.0 * pi,
        _ => 2.0 * pi.powf(d as f64 / 2.0) / crate::specfun::gamma_half(d as u32).unwrap(),
    }
}

/// Sum a vector in a fixed pairwise order.
pub fn pairwise_sum<T: Copy + std::ops::Add<Output = T> + Default>(v: &[T]) -> T {
    match v.len() {
        0 => T::default(),
        1 => v[0],
        n => {
            let (a, b) = v.split_at(n / 2);
            pairwise_sum(a) + pairwise_sum(b)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn jacobi_moments() {
        // int_{-1}^{1} (1-x)^a (1+x)^b dx = 2^{a+b+1} B(a+1, b+1)
        let (a, b) = (0.5, 0.0);
        let r = jacobi(20, a, b);
        let s: f64 = r.weights.iter().sum();
        assert!((s - 2f64.powf(1.5) / 1.5).abs() < 1e-13);
        let m1p: f64 = r.pairs().map(|(x, w)| w * (1.0 + x)).sum();
        assert!((m1p - 2f64.powf(2.5) * 4.0 / 15.0).abs() < 1e-13);
    }

    #[test]
    fn even_count_forced() {
        assert_eq!(jacobi(7, -0.5, 0.0).len(), 8);
    }

    #[test]
    fn sphere_areas() {
        for d in 1..=3 {
            let s: f64 = sphere(d, 8).iter().map(|p| p.1).sum();
            assert!((s - sphere_area(d)).abs() < 1e-12);
        }
    }

    #[test]
    fn hermite_second_moment() {
        let r = hermite(12);
        let m: f64 = r.pairs().map(|(x, w)| w * x * x).sum();
        assert!((m - std::f64::consts::PI.sqrt() / 2.0).abs() < 1e-13);
    }
}
