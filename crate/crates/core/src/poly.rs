//! Sparse multivariate polynomials with complex coefficients.

use std::collections::BTreeMap;

use nalgebra::DMatrix;
use num_complex::Complex64;

pub type C64 = Complex64;
pub type Multi = Vec<u8>;

const ZERO: C64 = C64::new(0.0, 0.0);
const ONE: C64 = C64::new(1.0, 0.0);

#[derive(Debug, Clone, PartialEq)]
pub struct Poly {
    pub dim: usize,
    pub terms: BTreeMap<Multi, C64>,
}

impl Poly {
    pub fn zero(dim: usize) -> Self {
        Self { dim, terms: BTreeMap::new() }
    }

    pub fn constant(dim: usize, c: C64) -> Self {
        let mut p = Self::zero(dim);
        if c != ZERO {
            p.terms.insert(vec![0; dim], c);
        }
        p
    }

    pub fn one(dim: usize) -> Self {
        Self::constant(dim, ONE)
    }

    pub fn monomial(dim: usize, alpha: &[u8], c: C64) -> Self {
        assert_eq!(alpha.len(), dim);
        let mut p = Self::zero(dim);
        if c != ZERO {
            p.terms.insert(alpha.to_vec(), c);
        }
        p
    }

    /// u_j
    pub fn var(dim: usize, j: usize) -> Self {
        let mut a = vec![0; dim];
        a[j] = 1;
        Self::monomial(dim, &a, ONE)
    }

    /// c0 + sum_j a_j u_j
    pub fn linear(coeffs: &[C64], c0: C64) -> Self {
        let dim = coeffs.len();
        let mut p = Self::constant(dim, c0);
        for (j, &a) in coeffs.iter().enumerate() {
            if a != ZERO {
                let mut m = vec![0; dim];
                m[j] = 1;
                p.terms.insert(m, a);
            }
        }
        p
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn degree(&self) -> usize {
        self.terms
            .keys()
            .map(|a| a.iter().map(|&e| e as usize).sum())
            .max()
            .unwrap_or(0)
    }

    fn push(&mut self, a: Multi, c: C64) {
        let e = self.terms.entry(a).or_insert(ZERO);
        *e += c;
    }

    fn clean(mut self) -> Self {
        self.terms.retain(|_, c| *c != ZERO);
        self
    }

    pub fn add(&self, o: &Poly) -> Poly {
        let mut r = self.clone();
        r.add_assign(o);
        r
    }

    pub fn add_assign(&mut self, o: &Poly) {
        assert_eq!(self.dim, o.dim);
        for (a, c) in &o.terms {
            self.push(a.clone(), *c);
        }
        self.terms.retain(|_, c| *c != ZERO);
    }

    pub fn scale(&self, s: C64) -> Poly {
        if s == ZERO {
            return Poly::zero(self.dim);
        }
        Poly {
            dim: self.dim,
            terms: self.terms.iter().map(|(a, c)| (a.clone(), c * s)).collect(),
        }
    }

    pub fn mul(&self, o: &Poly) -> Poly {
        assert_eq!(self.dim, o.dim);
        let mut r = Poly::zero(self.dim);
        for (a, c) in &self.terms {
            for (b, d) in &o.terms {
                let m: Multi = a.iter().zip(b).map(|(x, y)| x + y).collect();
                r.push(m, c * d);
            }
        }
        r.clean()
    }

    pub fn deriv(&self, j: usize) -> Poly {
        let mut r = Poly::zero(self.dim);
        for (a, c) in &self.terms {
            if a[j] > 0 {
                let mut m = a.clone();
                m[j] -= 1;
                r.push(m, c * a[j] as f64);
            }
        }
        r.clean()
    }

    /// Drops coefficients below `tol` times the largest one.
    pub fn prune(&self, tol: f64) -> Poly {
        let mx = self.terms.values().fold(0.0f64, |m, c| m.max(c.norm()));
        Poly {
            dim: self.dim,
            terms: self
                .terms
                .iter()
                .filter(|(_, c)| c.norm() > tol * mx)
                .map(|(a, c)| (a.clone(), *c))
                .collect(),
        }
    }

    fn powers<T: Copy + std::ops::Mul<Output = T>>(&self, u: &[T], one: T) -> Vec<Vec<T>> {
        let deg = self
            .terms
            .keys()
            .flat_map(|a| a.iter().copied())
            .max()
            .unwrap_or(0) as usize;
        u.iter()
            .map(|&x| {
                let mut v = Vec::with_capacity(deg + 1);
                let mut acc = one;
                v.push(acc);
                for _ in 0..deg {
                    acc = acc * x;
                    v.push(acc);
                }
                v
            })
            .collect()
    }

    pub fn eval(&self, u: &[f64]) -> C64 {
        debug_assert_eq!(u.len(), self.dim);
        let pw = self.powers(u, 1.0);
        let mut s = ZERO;
        for (a, c) in &self.terms {
            let mut m = 1.0;
            for (j, &e) in a.iter().enumerate() {
                m *= pw[j][e as usize];
            }
            s += c * m;
        }
        s
    }

    pub fn eval_c(&self, u: &[C64]) -> C64 {
        let pw = self.powers(u, ONE);
        let mut s = ZERO;
        for (a, c) in &self.terms {
            let mut m = ONE;
            for (j, &e) in a.iter().enumerate() {
                m *= pw[j][e as usize];
            }
            s += c * m;
        }
        s
    }

    /// q(y) = p(W y + t) with W of shape (self.dim, new_dim).
    pub fn compose_affine(&self, w: &DMatrix<C64>, t: &[C64]) -> Poly {
        assert_eq!(w.nrows(), self.dim);
        let nd = w.ncols();
        let lins: Vec<Poly> = (0..self.dim)
            .map(|j| {
                let row: Vec<C64> = (0..nd).map(|k| w[(j, k)]).collect();
                Poly::linear(&row, t[j])
            })
            .collect();
        let terms: Vec<(&Multi, &C64)> = self.terms.iter().collect();
        if terms.is_empty() {
            return Poly::zero(nd);
        }
        horner(&terms, 0, &lins, nd).clean()
    }

    /// Fixes the listed coordinates and returns a polynomial in the rest,
    /// keeping the remaining coordinates in their original order.
    pub fn substitute(&self, fixed: &[(usize, f64)]) -> Poly {
        let keep: Vec<usize> = (0..self.dim)
            .filter(|j| !fixed.iter().any(|(f, _)| f == j))
            .collect();
        let mut r = Poly::zero(keep.len());
        for (a, c) in &self.terms {
            let mut coef = *c;
            for &(f, v) in fixed {
                coef *= v.powi(a[f] as i32);
            }
            let m: Multi = keep.iter().map(|&k| a[k]).collect();
            r.push(m, coef);
        }
        r.clean()
    }

    /// Embeds into a larger space: variable j goes to position map[j].
    pub fn embed(&self, new_dim: usize, map: &[usize]) -> Poly {
        let mut r = Poly::zero(new_dim);
        for (a, c) in &self.terms {
            let mut m = vec![0; new_dim];
            for (j, &e) in a.iter().enumerate() {
                m[map[j]] = e;
            }
            r.push(m, *c);
        }
        r
    }

    /// Coefficients in u_last after fixing all other coordinates.
    pub fn last_axis_coeffs(&self, head: &[f64]) -> Vec<C64> {
        let d = self.dim;
        let deg = self.terms.keys().map(|a| a[d - 1]).max().unwrap_or(0) as usize;
        let mut out = vec![ZERO; deg + 1];
        for (a, c) in &self.terms {
            let mut m = *c;
            for (j, &x) in head.iter().enumerate() {
                m *= x.powi(a[j] as i32);
            }
            out[a[d - 1] as usize] += m;
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn product_and_derivative() {
        let x = Poly::var(2, 0);
        let y = Poly::var(2, 1);
        let p = x.mul(&x).mul(&y).add(&Poly::constant(2, C64::new(3.0, 1.0)));
        assert_eq!(p.degree(), 3);
        let v = p.eval(&[2.0, -1.0]);
        assert_eq!(v, C64::new(-1.0, 1.0));
        let dx = p.deriv(0);
        assert_eq!(dx.eval(&[2.0, -1.0]), C64::new(-4.0, 0.0));
    }

    #[test]
    fn compose_matches_pointwise() {
        let p = Poly::var(2, 0).mul(&Poly::var(2, 1)).add(&Poly::var(2, 1));
        let w = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, -1.0, 0.5]).map(|x| C64::new(x, 0.0));
        let t = [C64::new(0.5, 0.0), C64::new(-1.0, 0.0)];
        let q = p.compose_affine(&w, &t);
        let y = [0.3, -0.7];
        let u = [0.3 + 2.0 * -0.7 + 0.5, -0.3 + 0.5 * -0.7 - 1.0];
        assert!((q.eval(&y) - p.eval(&u)).norm() < 1e-14);
    }

    #[test]
    fn substitute_and_slice() {
        let p = Poly::var(3, 0).mul(&Poly::var(3, 2)).add(&Poly::var(3, 1));
        let q = p.substitute(&[(1, 2.0)]);
        assert_eq!(q.dim, 2);
        assert_eq!(q.eval(&[3.0, 4.0]), p.eval(&[3.0, 2.0, 4.0]));
        let c = p.last_axis_coeffs(&[3.0, 2.0]);
        assert_eq!(c, vec![C64::new(2.0, 0.0), C64::new(3.0, 0.0)]);
    }
}

/// Horner evaluation in variable `j` over a lexicographically sorted run of
/// terms sharing the exponents of variables `< j`.
fn horner(terms: &[(&Multi, &C64)], j: usize, lins: &[Poly], nd: usize) -> Poly {
    if j == lins.len() {
        return Poly::constant(nd, terms.iter().map(|(_, c)| **c).sum());
    }
    let mut groups: Vec<(u8, &[(&Multi, &C64)])> = Vec::new();
    let mut start = 0;
    for i in 1..=terms.len() {
        if i == terms.len() || terms[i].0[j] != terms[start].0[j] {
            groups.push((terms[start].0[j], &terms[start..i]));
            start = i;
        }
    }
    let mut r: Option<Poly> = None;
    let mut e_prev = 0u8;
    for &(e, g) in groups.iter().rev() {
        let inner = horner(g, j + 1, lins, nd);
        r = Some(match r {
            None => inner,
            Some(mut acc) => {
                for _ in e..e_prev {
                    acc = acc.mul(&lins[j]);
                }
                acc.add_assign(&inner);
                acc
            }
        });
        e_prev = e;
    }
    let mut acc = r.unwrap_or_else(|| Poly::zero(nd));
    for _ in 0..e_prev {
        acc = acc.mul(&lins[j]);
    }
    acc
}
