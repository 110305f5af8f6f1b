//! Sparse complex polynomials in the upper-triangle entries `x_ab = k_ab`, `a ≤ b`.

use std::collections::BTreeMap;

use nalgebra::DMatrix;
use num_complex::Complex64;

/// Position of `(a, b)` in the row-major packed upper triangle.
pub fn sym_index(n: usize, a: usize, b: usize) -> usize {
    let (i, j) = if a <= b { (a, b) } else { (b, a) };
    i * n - i * (i + 1) / 2 + j
}

/// Packed upper-triangle coordinates of a symmetric matrix.
pub fn packed(m: &DMatrix<f64>) -> Vec<f64> {
    let n = m.nrows();
    (0..n).flat_map(|i| (i..n).map(move |j| (i, j))).map(|(i, j)| m[(i, j)]).collect()
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Poly {
    vars: usize,
    terms: BTreeMap<Vec<u16>, Complex64>,
}

impl Poly {
    pub fn zero(vars: usize) -> Self {
        Self { vars, terms: BTreeMap::new() }
    }

    pub fn constant(vars: usize, c: Complex64) -> Self {
        let mut p = Self::zero(vars);
        p.add_term(vec![0; vars], c);
        p
    }

    pub fn var(vars: usize, idx: usize) -> Self {
        let mut e = vec![0; vars];
        e[idx] = 1;
        let mut p = Self::zero(vars);
        p.add_term(e, Complex64::new(1.0, 0.0));
        p
    }

    /// `Σ_v coeffs[v] x_v`.
    pub fn linear(coeffs: &[f64]) -> Self {
        let mut p = Self::zero(coeffs.len());
        for (v, &c) in coeffs.iter().enumerate() {
            if c != 0.0 {
                let mut e = vec![0; coeffs.len()];
                e[v] = 1;
                p.add_term(e, Complex64::new(c, 0.0));
            }
        }
        p
    }

    pub fn vars(&self) -> usize {
        self.vars
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn terms(&self) -> impl Iterator<Item = (&Vec<u16>, &Complex64)> {
        self.terms.iter()
    }

    fn add_term(&mut self, e: Vec<u16>, c: Complex64) {
        if c == Complex64::new(0.0, 0.0) {
            return;
        }
        let entry = self.terms.entry(e).or_insert(Complex64::new(0.0, 0.0));
        *entry += c;
    }

    pub fn add(&self, other: &Poly) -> Poly {
        let mut out = self.clone();
        for (e, c) in &other.terms {
            out.add_term(e.clone(), *c);
        }
        out
    }

    pub fn scale(&self, c: Complex64) -> Poly {
        let mut out = Poly::zero(self.vars);
        for (e, v) in &self.terms {
            out.add_term(e.clone(), v * c);
        }
        out
    }

    pub fn mul(&self, other: &Poly) -> Poly {
        let mut out = Poly::zero(self.vars);
        for (e1, c1) in &self.terms {
            for (e2, c2) in &other.terms {
                let e: Vec<u16> = e1.iter().zip(e2).map(|(a, b)| a + b).collect();
                out.add_term(e, c1 * c2);
            }
        }
        out
    }

    pub fn pow(&self, k: u16) -> Poly {
        (0..k).fold(Poly::constant(self.vars, Complex64::new(1.0, 0.0)), |acc, _| acc.mul(self))
    }

    /// `∂/∂x_idx`.
    pub fn derivative(&self, idx: usize) -> Poly {
        let mut out = Poly::zero(self.vars);
        for (e, c) in &self.terms {
            if e[idx] > 0 {
                let mut e2 = e.clone();
                e2[idx] -= 1;
                out.add_term(e2, c * e[idx] as f64);
            }
        }
        out
    }

    pub fn eval(&self, x: &[f64]) -> Complex64 {
        self.terms
            .iter()
            .map(|(e, c)| c * e.iter().zip(x).map(|(&p, &xv)| xv.powi(p as i32)).product::<f64>())
            .sum()
    }

    /// Replaces each `x_v` by `subs[v]`.
    pub fn substitute(&self, subs: &[Poly]) -> Poly {
        let mut out = Poly::zero(self.vars);
        for (e, c) in &self.terms {
            let mut t = Poly::constant(self.vars, *c);
            for (v, &p) in e.iter().enumerate() {
                if p > 0 {
                    t = t.mul(&subs[v].pow(p));
                }
            }
            out = out.add(&t);
        }
        out
    }
}

/// Symbolic `adj(k)_ab` of a symmetric `n × n` matrix in packed variables.
pub fn adjugate_entry(n: usize, a: usize, b: usize) -> Poly {
    let vars = n * (n + 1) / 2;
    // cofactor C_ba = (−1)^{a+b} det(k without row b, column a)
    let rows: Vec<usize> = (0..n).filter(|&r| r != b).collect();
    let cols: Vec<usize> = (0..n).filter(|&c| c != a).collect();
    let m = n - 1;
    let mut out = if m == 0 { Poly::constant(vars, Complex64::new(1.0, 0.0)) } else { Poly::zero(vars) };
    for perm in permutations(m) {
        let sign = permutation_sign(&perm);
        let mut t = Poly::constant(vars, Complex64::new(sign, 0.0));
        for (i, &pi) in perm.iter().enumerate() {
            t = t.mul(&Poly::var(vars, sym_index(n, rows[i], cols[pi])));
        }
        out = out.add(&t);
    }
    let s = if (a + b) % 2 == 0 { 1.0 } else { -1.0 };
    out.scale(Complex64::new(s, 0.0))
}

fn permutations(m: usize) -> Vec<Vec<usize>> {
    if m == 0 {
        return vec![];
    }
    let mut out = vec![vec![0]];
    for k in 1..m {
        let mut next = Vec::new();
        for p in &out {
            for pos in 0..=p.len() {
                let mut q = p.clone();
                q.insert(pos, k);
                next.push(q);
            }
        }
        out = next;
    }
    out
}

fn permutation_sign(p: &[usize]) -> f64 {
    let mut inv = 0;
    for i in 0..p.len() {
        for j in (i + 1)..p.len() {
            if p[i] > p[j] {
                inv += 1;
            }
        }
    }
    if inv % 2 == 0 {
        1.0
    } else {
        -1.0
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matrix::sample_spd;

    #[test]
    fn packed_index_layout() {
        let n = 3;
        let expected = [(0, 0), (0, 1), (0, 2), (1, 1), (1, 2), (2, 2)];
        for (idx, &(a, b)) in expected.iter().enumerate() {
            assert_eq!(sym_index(n, a, b), idx);
            assert_eq!(sym_index(n, b, a), idx);
        }
        assert_eq!(sym_index(2, 1, 1), 2);
    }

    #[test]
    fn adjugate_matches_numeric_inverse() {
        for n in 1..=4 {
            let k = sample_spd(n, 40 + n as u64, 1.0);
            let x = packed(k.as_matrix());
            let det = k.det();
            let inv = k.inverse();
            for a in 0..n {
                for b in 0..n {
                    let adj = adjugate_entry(n, a, b).eval(&x);
                    assert!((adj.re - det * inv.as_matrix()[(a, b)]).abs() < 1e-12 * (1.0 + det.abs()));
                    assert_eq!(adj.im, 0.0);
                }
            }
        }
    }

    #[test]
    fn product_rule() {
        let p = Poly::linear(&[1.0, 2.0, 0.0]).add(&Poly::constant(3, Complex64::new(0.5, 1.0)));
        let q = Poly::var(3, 2).pow(2);
        let x = [0.3, -0.7, 1.1];
        let lhs = p.mul(&q).derivative(2).eval(&x);
        let rhs = p.derivative(2).mul(&q).add(&p.mul(&q.derivative(2))).eval(&x);
        assert!((lhs - rhs).norm() < 1e-14);
    }
}
