//! Polar factorization `S = MT` of `GL⁺(n)`, rotation chains on `SO(n)`, the wedge-product
//! Jacobians of `S ↦ (M, T)` and `T ↦ TᵀT`, and the resulting change of variables from
//! `GL⁺(n)` to the positive-definite cone.

use std::f64::consts::PI;

use nalgebra::DMatrix;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{ChiSquared, Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::{cholesky, GlPlusMatrix, SpdMatrix, SymMatrixR};
use crate::par::{integrate_one, Estimate, McConfig};
use crate::special::{ln_kn_closed, ln_multigamma, omega_n};

/// Relative column-norm floor for Gram–Schmidt.
pub const GS_TOL: f64 = 1e-14;

/// `S = M T` with `M ∈ SO(n)` and `T` upper triangular with positive diagonal.
#[derive(Debug, Clone, PartialEq)]
pub struct PolarFactors {
    pub m: DMatrix<f64>,
    pub t: DMatrix<f64>,
}

/// Modified Gram–Schmidt on the columns of `S`, with one reorthogonalization pass.
pub fn polar_decompose(s: &GlPlusMatrix) -> Result<PolarFactors> {
    let a = s.as_matrix();
    let n = a.nrows();
    let scale = a.norm();
    let mut q = DMatrix::<f64>::zeros(n, n);
    let mut t = DMatrix::<f64>::zeros(n, n);
    for j in 0..n {
        let mut v = a.column(j).clone_owned();
        for _pass in 0..2 {
            for i in 0..j {
                let r = q.column(i).dot(&v);
                t[(i, j)] += r;
                v -= q.column(i) * r;
            }
        }
        let norm = v.norm();
        if !(norm > GS_TOL * scale) {
            return Err(Error::IllConditioned(format!("column {j} collapses under Gram-Schmidt")));
        }
        t[(j, j)] = norm;
        q.set_column(j, &(v / norm));
    }
    Ok(PolarFactors { m: q, t })
}

/// Angles `θ_ij`, `n ≥ i > j ≥ 1`, ordered `(2,1), (3,1), …, (n,1), (3,2), …, (n,n−1)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RotationChain {
    pub n: usize,
    pub angles: Vec<f64>,
}

impl RotationChain {
    pub fn new(n: usize, angles: Vec<f64>) -> Result<Self> {
        let d = n * (n - 1) / 2;
        if angles.len() != d {
            return Err(Error::DimensionMismatch { expected: d, found: angles.len() });
        }
        if let Some(bad) = angles.iter().find(|a| !(a.abs() <= PI)) {
            return Err(Error::Domain(format!("rotation angle {bad} outside [-π, π]")));
        }
        Ok(Self { n, angles })
    }

    /// Zero-based `(i, j)` planes in chain order.
    pub fn planes(n: usize) -> Vec<(usize, usize)> {
        let mut out = Vec::with_capacity(n * (n - 1) / 2);
        for j in 0..n {
            for i in (j + 1)..n {
                out.push((i, j));
            }
        }
        out
    }
}

/// Givens factor `R_ij` acting in the `(j, i)` plane.
pub fn givens(n: usize, i: usize, j: usize, theta: f64) -> DMatrix<f64> {
    let (s, c) = theta.sin_cos();
    let mut r = DMatrix::identity(n, n);
    r[(j, j)] = c;
    r[(j, i)] = -s;
    r[(i, j)] = s;
    r[(i, i)] = c;
    r
}

/// Ordered product `(R₂₁R₃₁⋯R_{n1})(R₃₂⋯R_{n2})⋯(R_{n(n−1)})`.
pub fn build_rotation(chain: &RotationChain) -> DMatrix<f64> {
    let n = chain.n;
    RotationChain::planes(n)
        .into_iter()
        .zip(&chain.angles)
        .fold(DMatrix::identity(n, n), |acc, ((i, j), &th)| acc * givens(n, i, j, th))
}

/// `∏_{j=1}^{n−1} (T_jj)^{n−j}`, the `T`-dependence of the `S ↦ (M, T)` Jacobian.
pub fn jacobian_polar(t: &DMatrix<f64>) -> f64 {
    let n = t.nrows();
    (0..n).map(|j| t[(j, j)].powi((n - 1 - j) as i32)).product()
}

/// `2ⁿ ∏_{j=1}^{n} (T_jj)^{n+1−j}`, the Jacobian of `T ↦ G = TᵀT`.
pub fn jacobian_t_to_g(t: &DMatrix<f64>) -> f64 {
    let n = t.nrows();
    2f64.powi(n as i32) * (0..n).map(|j| t[(j, j)].powi((n - j) as i32)).product::<f64>()
}

/// Cone integral `∫₊ (det G)^a e^{-tr G} dG` against its `GL⁺(n)` form.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Pushforward {
    pub n: usize,
    pub a: f64,
    pub lhs: f64,
    /// `2ⁿ Ω_n⁻¹ ∫_{det S>0} det S · f(SᵀS) dS`.
    pub rhs: Estimate,
    pub ratio: f64,
    pub ratio_stderr: f64,
}

/// Compares `∫₊ f(G) dG` with `2ⁿ Ω_n⁻¹ ∫_{det S>0} det S f(SᵀS) dS` for
/// `f = (det G)^a e^{-tr G}`. `S` is drawn with i.i.d. `N(0, 1/2)` entries, the Gaussian
/// factor of `f(SᵀS)`.
pub fn pushforward_check(n: usize, a: f64, mc: &McConfig) -> Result<Pushforward> {
    let lhs = ln_kn_closed(n, a)?.exp();
    let nf = n as f64;
    let ln_pref = nf * 2f64.ln() - omega_n(n).ln() + nf * nf / 2.0 * PI.ln();
    let sd = 0.5f64.sqrt();
    let rhs = integrate_one(mc, |rng| {
        let s = DMatrix::from_fn(n, n, |_, _| sd * rng.sample::<f64, _>(StandardNormal));
        let det = s.determinant();
        let w = if det > 0.0 { (ln_pref + (2.0 * a + 1.0) * det.ln()).exp() } else { 0.0 };
        num_complex::Complex64::new(w, 0.0)
    });
    let ratio = lhs / rhs.mean.re;
    Ok(Pushforward { n, a, lhs, rhs, ratio, ratio_stderr: ratio * rhs.stderr / rhs.mean.re })
}

/// Wishart law `W_n(ν, Σ)`: density `∝ (det X)^{(ν−n−1)/2} e^{-tr(Σ⁻¹X)/2}` with respect to
/// `∏_{a≤b} dX_ab`.
#[derive(Debug, Clone)]
pub struct Wishart {
    n: usize,
    nu: f64,
    chol: DMatrix<f64>,
    sigma_inv: DMatrix<f64>,
    ln_norm: f64,
    chis: Vec<ChiSquared<f64>>,
}

impl Wishart {
    pub fn new(nu: f64, sigma: &SpdMatrix) -> Result<Self> {
        let n = sigma.n();
        let nf = n as f64;
        if !(nu > nf - 1.0) {
            return Err(Error::Domain(format!("Wishart needs ν > n − 1, got ν={nu}")));
        }
        let ln_norm = -(nu * nf / 2.0 * 2f64.ln() + nu / 2.0 * sigma.ln_det() + ln_multigamma(n, nu / 2.0)?);
        let chis = (0..n)
            .map(|i| ChiSquared::new(nu - i as f64).map_err(|e| Error::Domain(e.to_string())))
            .collect::<Result<_>>()?;
        Ok(Self {
            n,
            nu,
            chol: sigma.cholesky_factor().clone(),
            sigma_inv: sigma.inverse().as_matrix().clone(),
            ln_norm,
            chis,
        })
    }

    /// Bartlett construction `X = L A Aᵀ Lᵀ`.
    pub fn sample(&self, rng: &mut ChaCha8Rng) -> SymMatrixR {
        let n = self.n;
        let mut a = DMatrix::<f64>::zeros(n, n);
        for i in 0..n {
            a[(i, i)] = self.chis[i].sample(rng).sqrt();
            for j in 0..i {
                a[(i, j)] = rng.sample(StandardNormal);
            }
        }
        let la = &self.chol * a;
        SymMatrixR::mirror_upper(&(&la * la.transpose()))
    }

    pub fn ln_density(&self, x: &DMatrix<f64>) -> f64 {
        let nf = self.n as f64;
        let ln_det = match cholesky(x) {
            Ok(l) => 2.0 * l.diagonal().iter().map(|d| d.ln()).sum::<f64>(),
            Err(_) => return f64::NEG_INFINITY,
        };
        let tr = (&self.sigma_inv * x).trace();
        self.ln_norm + (self.nu - nf - 1.0) / 2.0 * ln_det - tr / 2.0
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matrix::{sample_glplus, sample_glplus_with};
    use approx::assert_relative_eq;
    use proptest::prelude::{any, prop_assert, prop_assert_eq, proptest};
    use rand::SeedableRng;

    fn orth_err(m: &DMatrix<f64>) -> f64 {
        (m.transpose() * m - DMatrix::identity(m.nrows(), m.nrows())).amax()
    }

    #[test]
    fn polar_examples() {
        let id = polar_decompose(&GlPlusMatrix::identity(3)).unwrap();
        assert_eq!(id.m, DMatrix::identity(3, 3));
        assert_eq!(id.t, DMatrix::identity(3, 3));

        let rot = build_rotation(&RotationChain::new(3, vec![0.3, -1.1, 2.0]).unwrap());
        let f = polar_decompose(&GlPlusMatrix::new(rot.clone()).unwrap()).unwrap();
        assert!((&f.m - &rot).amax() < 1e-14);
        assert!((&f.t - DMatrix::identity(3, 3)).amax() < 1e-14);

        let s = GlPlusMatrix::new(DMatrix::from_row_slice(2, 2, &[0.0, -2.0, 1.0, 0.0])).unwrap();
        let f = polar_decompose(&s).unwrap();
        assert_relative_eq!(f.m, DMatrix::from_row_slice(2, 2, &[0.0, -1.0, 1.0, 0.0]), epsilon = 1e-15);
        assert_relative_eq!(f.t, DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 2.0]), epsilon = 1e-15);
    }

    #[test]
    fn rotation_examples() {
        assert_eq!(build_rotation(&RotationChain::new(3, vec![0.0; 3]).unwrap()), DMatrix::identity(3, 3));
        let r = build_rotation(&RotationChain::new(2, vec![PI / 2.0]).unwrap());
        assert_relative_eq!(r, DMatrix::from_row_slice(2, 2, &[0.0, -1.0, 1.0, 0.0]), epsilon = 1e-15);
        assert!(RotationChain::new(3, vec![0.0; 2]).is_err());
        assert!(RotationChain::new(2, vec![4.0]).is_err());
    }

    #[test]
    fn jacobian_examples() {
        assert_eq!(jacobian_polar(&DMatrix::identity(3, 3)), 1.0);
        assert_eq!(jacobian_polar(&DMatrix::from_row_slice(2, 2, &[3.0, 0.7, 0.0, 5.0])), 3.0);
        assert_eq!(jacobian_polar(&DMatrix::from_diagonal(&nalgebra::dvector![2.0, 3.0, 5.0])), 12.0);
        assert_eq!(jacobian_t_to_g(&DMatrix::identity(2, 2)), 4.0);
        assert_eq!(jacobian_t_to_g(&DMatrix::from_diagonal(&nalgebra::dvector![2.0, 3.0])), 48.0);
    }

    fn upper_coords(n: usize) -> Vec<(usize, usize)> {
        (0..n).flat_map(|i| (i..n).map(move |j| (i, j))).collect()
    }

    /// `|det ∂(TᵀT)_{a≤b} / ∂T_{a≤b}|` by central differences.
    fn fd_jacobian_t_to_g(t: &DMatrix<f64>) -> f64 {
        let n = t.nrows();
        let coords = upper_coords(n);
        let d = coords.len();
        let h = 1e-6;
        let mut jac = DMatrix::<f64>::zeros(d, d);
        for (c, &(i, j)) in coords.iter().enumerate() {
            let mut tp = t.clone();
            let mut tm = t.clone();
            tp[(i, j)] += h;
            tm[(i, j)] -= h;
            let gp = tp.transpose() * &tp;
            let gm = tm.transpose() * &tm;
            for (r, &(a, b)) in coords.iter().enumerate() {
                jac[(r, c)] = (gp[(a, b)] - gm[(a, b)]) / (2.0 * h);
            }
        }
        jac.determinant().abs()
    }

    /// `|det ∂S / ∂(θ, T)|` for `S = R(θ) T`, by central differences.
    fn fd_jacobian_polar(angles: &[f64], t: &DMatrix<f64>) -> f64 {
        let n = t.nrows();
        let coords = upper_coords(n);
        let na = angles.len();
        let h = 1e-6;
        let s_of = |ang: &[f64], tt: &DMatrix<f64>| build_rotation(&RotationChain::new(n, ang.to_vec()).unwrap()) * tt;
        let mut jac = DMatrix::<f64>::zeros(n * n, n * n);
        for c in 0..na + coords.len() {
            let (mut ap, mut am) = (angles.to_vec(), angles.to_vec());
            let (mut tp, mut tm) = (t.clone(), t.clone());
            if c < na {
                ap[c] += h;
                am[c] -= h;
            } else {
                let (i, j) = coords[c - na];
                tp[(i, j)] += h;
                tm[(i, j)] -= h;
            }
            let ds = (s_of(&ap, &tp) - s_of(&am, &tm)) / (2.0 * h);
            for r in 0..n * n {
                jac[(r, c)] = ds[(r / n, r % n)];
            }
        }
        jac.determinant().abs()
    }

    fn random_t(rng: &mut ChaCha8Rng, n: usize) -> DMatrix<f64> {
        DMatrix::from_fn(n, n, |i, j| match i.cmp(&j) {
            std::cmp::Ordering::Less => rng.random_range(-1.0..1.0),
            std::cmp::Ordering::Equal => rng.random_range(0.5..2.0),
            std::cmp::Ordering::Greater => 0.0,
        })
    }

    #[test]
    fn jacobians_agree_with_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for n in 1..=3 {
            let angles: Vec<f64> = (0..n * (n - 1) / 2).map(|_| rng.random_range(-1.0..1.0)).collect();
            let t0 = random_t(&mut rng, n);
            let base = fd_jacobian_polar(&angles, &t0) / jacobian_polar(&t0);
            for _ in 0..5 {
                let t = random_t(&mut rng, n);
                let fd = fd_jacobian_t_to_g(&t);
                assert!((fd / jacobian_t_to_g(&t) - 1.0).abs() < 1e-7);
                // the angular factor does not depend on T
                let ang = fd_jacobian_polar(&angles, &t) / jacobian_polar(&t);
                assert!((ang / base - 1.0).abs() < 1e-7);
                // the two Jacobians combine into 2ⁿ det S, det S = det T
                let s = build_rotation(&RotationChain::new(n, angles.clone()).unwrap()) * &t;
                let ratio = jacobian_t_to_g(&t) / jacobian_polar(&t);
                assert!((ratio / (2f64.powi(n as i32) * s.determinant()) - 1.0).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn wishart_moments() {
        let sigma = SpdMatrix::from_matrix(&DMatrix::from_row_slice(2, 2, &[1.0, 0.3, 0.3, 0.5])).unwrap();
        let w = Wishart::new(5.0, &sigma).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let m = 20_000;
        let mut mean = DMatrix::<f64>::zeros(2, 2);
        for _ in 0..m {
            mean += w.sample(&mut rng).as_matrix();
        }
        mean /= m as f64;
        assert!((mean - sigma.as_matrix() * 5.0).amax() < 0.1);
    }

    #[test]
    fn wishart_density_normalizes() {
        // importance estimate of ∫ q_W / q_W' over samples of W'
        let sigma = SpdMatrix::identity(2);
        let target = Wishart::new(4.0, &sigma).unwrap();
        let proposal = Wishart::new(4.5, &SpdMatrix::from_diagonal(&[1.2, 1.2]).unwrap()).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        let m = 40_000;
        let mean: f64 = (0..m)
            .map(|_| {
                let x = proposal.sample(&mut rng);
                (target.ln_density(x.as_matrix()) - proposal.ln_density(x.as_matrix())).exp()
            })
            .sum::<f64>()
            / m as f64;
        assert!((mean - 1.0).abs() < 0.03, "{mean}");
    }

    #[test]
    fn pushforward_n1_ratio() {
        let p = pushforward_check(1, 0.0, &McConfig::new(200_000, 3)).unwrap();
        assert_relative_eq!(p.lhs, 1.0, max_relative = 1e-12);
        assert!((p.ratio - 2.0).abs() < 3.0 * p.ratio_stderr, "{p:?}");
    }

    #[test]
    fn glplus_sampler_round_trip_sample() {
        let s = sample_glplus(4, 12, 1.0);
        let f = polar_decompose(&s).unwrap();
        assert!((&f.m * &f.t - s.as_matrix()).norm() <= 1e-12 * s.as_matrix().norm());
    }

    proptest! {
        #[test]
        fn polar_round_trip(seed in any::<u64>(), n in 1usize..=5) {
            let s = sample_glplus_with(&mut ChaCha8Rng::seed_from_u64(seed), n, 1.0);
            let f = polar_decompose(&s).unwrap();
            prop_assert!((&f.m * &f.t - s.as_matrix()).norm() <= 1e-12 * s.as_matrix().norm());
            prop_assert!(orth_err(&f.m) <= 1e-12);
            prop_assert!((f.m.determinant() - 1.0).abs() <= 1e-12);
            for j in 0..n {
                prop_assert!(f.t[(j, j)] > 0.0);
                for i in (j + 1)..n {
                    prop_assert_eq!(f.t[(i, j)], 0.0);
                }
            }
        }

        #[test]
        fn rotations_are_special_orthogonal(seed in any::<u64>(), n in 2usize..=5) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let angles = (0..n * (n - 1) / 2).map(|_| rng.random_range(-PI..PI)).collect();
            let r = build_rotation(&RotationChain::new(n, angles).unwrap());
            prop_assert!(orth_err(&r) <= 1e-12);
            prop_assert!((r.determinant() - 1.0).abs() <= 1e-12);
        }
    }
}
