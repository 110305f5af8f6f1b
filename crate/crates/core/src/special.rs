//! Scalar and matrix-argument special functions, and Gauss–Legendre rules.

use std::f64::consts::PI;

use crate::error::{Error, Result};

pub use statrs::function::gamma::{gamma, ln_gamma};

/// Logarithm of the multivariate gamma function
/// `Γ_n(x) = π^{n(n-1)/4} ∏_{j=1..n} Γ(x - (j-1)/2)`, defined for `x > (n-1)/2`.
pub fn ln_multigamma(n: usize, x: f64) -> Result<f64> {
    let nf = n as f64;
    if n == 0 || x <= (nf - 1.0) / 2.0 {
        return Err(Error::Domain(format!("multivariate gamma Γ_{n}({x}) requires x > {}", (nf - 1.0) / 2.0)));
    }
    let mut acc = nf * (nf - 1.0) / 4.0 * PI.ln();
    for j in 0..n {
        acc += ln_gamma(x - j as f64 / 2.0);
    }
    Ok(acc)
}

/// `ln K_n(a)` where `K_n(a) = ∫_{k ≻ 0} (det k)^a e^{-tr k} ∏_{i≤j} dk_ij = Γ_n(a + (n+1)/2)`.
pub fn ln_kn_closed(n: usize, a: f64) -> Result<f64> {
    if a <= -1.0 {
        return Err(Error::DivergentIntegral(format!("K_{n}({a}) needs a > -1")));
    }
    ln_multigamma(n, a + (n as f64 + 1.0) / 2.0)
}

/// Principal `ln Γ(z)` for `Re z > 0`: upward recurrence to `Re z ≥ 15`, then Stirling.
pub fn ln_gamma_complex(z: num_complex::Complex64) -> num_complex::Complex64 {
    let mut z = z;
    let mut shift = num_complex::Complex64::new(0.0, 0.0);
    while z.re < 15.0 {
        shift += z.ln();
        z += 1.0;
    }
    let inv = z.inv();
    let inv2 = inv * inv;
    let series = inv * (1.0 / 12.0 - inv2 * (1.0 / 360.0 - inv2 * (1.0 / 1260.0 - inv2 / 1680.0)));
    (z - 0.5) * z.ln() - z + 0.5 * (2.0 * PI).ln() + series - shift
}

/// The product `Ω_n = ∏_{j=1..n} 2π^{j/2}/Γ(j/2)` of unit-sphere surface areas.
pub fn omega_n(n: usize) -> f64 {
    (1..=n)
        .map(|j| {
            let h = j as f64 / 2.0;
            2.0 * PI.powf(h) / gamma(h)
        })
        .product()
}

/// Gauss–Legendre nodes and weights on `[-1, 1]`.
pub fn gauss_legendre(m: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(m >= 1, "Gauss-Legendre rule needs at least one node");
    let mut nodes = vec![0.0; m];
    let mut weights = vec![0.0; m];
    let mf = m as f64;
    for i in 0..m.div_ceil(2) {
        let mut z = (PI * (i as f64 + 0.75) / (mf + 0.5)).cos();
        let mut dp = 1.0;
        for _ in 0..100 {
            let (p, d) = legendre_with_derivative(m, z);
            dp = d;
            let dz = p / d;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        let (_, d) = legendre_with_derivative(m, z);
        if d.is_finite() {
            dp = d;
        }
        nodes[i] = -z;
        nodes[m - 1 - i] = z;
        let w = 2.0 / ((1.0 - z * z) * dp * dp);
        weights[i] = w;
        weights[m - 1 - i] = w;
    }
    (nodes, weights)
}

fn legendre_with_derivative(m: usize, z: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = z;
    if m == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=m {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * z * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let dp = m as f64 * (z * p1 - p0) / (z * z - 1.0);
    (p1, dp)
}

/// Gauss–Legendre rule mapped to `[lo, hi]`.
pub fn gauss_legendre_on(m: usize, lo: f64, hi: f64) -> (Vec<f64>, Vec<f64>) {
    let (x, w) = gauss_legendre(m);
    let half = 0.5 * (hi - lo);
    let mid = 0.5 * (hi + lo);
    (x.iter().map(|t| mid + half * t).collect(), w.iter().map(|v| v * half).collect())
}
