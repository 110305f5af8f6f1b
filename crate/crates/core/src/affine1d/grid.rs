//! Log-spaced quadrature grid on `(0, ∞)` and the grid forms of `σ`, `θ`, `κ`.
//!
//! Nodes are `k_j = exp(u_0 + j h)` with weights `h k_j`, the periodic trapezoid rule in
//! `u = ln k`. Integrands that vanish at both ends converge geometrically in `h`.

use std::f64::consts::PI;
use std::sync::{Arc, OnceLock};

use nalgebra::DMatrix;
use num_complex::Complex64;
use statrs::function::gamma::{gamma_lr, gamma_ur};

use super::{Fiducial1D, Label1D};
use crate::error::{Error, Result};

pub const MIN_POINTS: usize = 16;
pub const DEFAULT_POINTS: usize = 2048;
/// Fiducial probability mass allowed outside the grid window, per side. Far below the
/// accuracy targets so that the periodic wrap of the spectral stencil sees no jump.
pub const MASS_TOL: f64 = 1e-30;

/// Discretization of `d/du` used by `κ`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Stencil {
    /// Second-order central differences with zero ghost values.
    Central,
    /// Fourier collocation on the periodic `u` grid.
    #[default]
    Spectral,
}

#[derive(Debug)]
pub struct LogGrid {
    k: Vec<f64>,
    w: Vec<f64>,
    h: f64,
    stencil: Stencil,
    spectral: OnceLock<DMatrix<f64>>,
}

impl LogGrid {
    pub fn new(kmin: f64, kmax: f64, points: usize, stencil: Stencil) -> Result<Self> {
        if points < MIN_POINTS {
            return Err(Error::GridTooCoarse { found: points, min: MIN_POINTS });
        }
        if !(kmin > 0.0 && kmax > kmin && kmax.is_finite()) {
            return Err(Error::Domain(format!("grid window [{kmin}, {kmax}] is not a positive interval")));
        }
        let (u0, u1) = (kmin.ln(), kmax.ln());
        let h = (u1 - u0) / (points - 1) as f64;
        let k: Vec<f64> = (0..points).map(|j| (u0 + j as f64 * h).exp()).collect();
        let w = k.iter().map(|&kj| h * kj).collect();
        Ok(Self { k, w, h, stencil, spectral: OnceLock::new() })
    }

    /// Window holding all but `MASS_TOL` of `|η(k/G)|²` on each side for every `G` in
    /// `[gmin, gmax]`.
    pub fn for_fiducial(
        fid: &Fiducial1D,
        gmin: f64,
        gmax: f64,
        points: usize,
        stencil: Stencil,
    ) -> Result<Self> {
        let (lo, hi) = fid.mass_window(MASS_TOL);
        Self::new(gmin * lo, gmax * hi, points, stencil)
    }

    /// Window covering every label in `labels`.
    pub fn for_labels(fid: &Fiducial1D, labels: &[Label1D], points: usize, stencil: Stencil) -> Result<Self> {
        let gmin = labels.iter().map(|l| l.g).fold(f64::INFINITY, f64::min);
        let gmax = labels.iter().map(|l| l.g).fold(0.0, f64::max);
        Self::for_fiducial(fid, gmin, gmax, points, stencil)
    }

    pub fn len(&self) -> usize {
        self.k.len()
    }

    pub fn is_empty(&self) -> bool {
        self.k.is_empty()
    }

    pub fn k(&self) -> &[f64] {
        &self.k
    }

    pub fn weights(&self) -> &[f64] {
        &self.w
    }

    /// Log-spacing `h`.
    pub fn step(&self) -> f64 {
        self.h
    }

    pub fn stencil(&self) -> Stencil {
        self.stencil
    }

    /// Fourier differentiation matrix on the periodic `u` grid (real, antisymmetric).
    pub fn spectral_matrix(&self) -> &DMatrix<f64> {
        self.spectral.get_or_init(|| {
            let n = self.len();
            let period = n as f64 * self.h;
            DMatrix::from_fn(n, n, |i, j| {
                if i == j {
                    return 0.0;
                }
                let d = i as f64 - j as f64;
                let sign = if (i + j) % 2 == 0 { 1.0 } else { -1.0 };
                if n % 2 == 0 {
                    sign * (PI / period) / (PI * d / n as f64).tan()
                } else {
                    sign * (PI / period) / (PI * d / n as f64).sin()
                }
            })
        })
    }

    /// `d/du` applied to samples, per the grid's stencil.
    fn du(&self, v: &[Complex64]) -> Vec<Complex64> {
        let n = self.len();
        match self.stencil {
            Stencil::Central => (0..n)
                .map(|j| {
                    let up = if j + 1 < n { v[j + 1] } else { Complex64::new(0.0, 0.0) };
                    let dn = if j > 0 { v[j - 1] } else { Complex64::new(0.0, 0.0) };
                    // 4 sinh(h/2) rather than 2h makes this exactly (θ₀k + kθ₀)/2
                    (up - dn) / (4.0 * (self.h / 2.0).sinh())
                })
                .collect(),
            Stencil::Spectral => {
                let d = self.spectral_matrix();
                (0..n)
                    .map(|i| (0..n).map(|j| v[j] * d[(i, j)]).sum())
                    .collect()
            }
        }
    }
}

/// Samples of a wavefunction on a shared grid.
#[derive(Debug, Clone)]
pub struct GridState1D {
    grid: Arc<LogGrid>,
    values: Vec<Complex64>,
}

impl GridState1D {
    pub fn new(grid: Arc<LogGrid>, values: Vec<Complex64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::DimensionMismatch { expected: grid.len(), found: values.len() });
        }
        Ok(Self { grid, values })
    }

    pub fn grid(&self) -> &Arc<LogGrid> {
        &self.grid
    }

    pub fn kgrid(&self) -> &[f64] {
        self.grid.k()
    }

    pub fn weights(&self) -> &[f64] {
        self.grid.weights()
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    /// `⟨self|other⟩ = Σ w_j conj(self_j) other_j`.
    pub fn inner(&self, other: &GridState1D) -> Result<Complex64> {
        self.check_same_grid(other)?;
        Ok(self
            .values
            .iter()
            .zip(&other.values)
            .zip(self.grid.weights())
            .map(|((a, b), w)| a.conj() * b * *w)
            .sum())
    }

    pub fn norm(&self) -> f64 {
        self.values.iter().zip(self.grid.weights()).map(|(v, w)| v.norm_sqr() * w).sum::<f64>().sqrt()
    }

    fn check_same_grid(&self, other: &GridState1D) -> Result<()> {
        if Arc::ptr_eq(&self.grid, &other.grid) || self.grid.k() == other.grid.k() {
            Ok(())
        } else {
            Err(Error::Domain("states live on different grids".into()))
        }
    }

    fn with_values(&self, values: Vec<Complex64>) -> GridState1D {
        GridState1D { grid: Arc::clone(&self.grid), values }
    }
}

/// Samples of `e^{iFk} G^{-1/2} η(k/G)`.
pub fn coherent_wavefunction(fid: &Fiducial1D, label: &Label1D, grid: &Arc<LogGrid>) -> GridState1D {
    let scale = label.g.powf(-0.5);
    let values = grid
        .k()
        .iter()
        .map(|&k| Complex64::from_polar(scale * fid.eval_unchecked(k / label.g), label.f * k))
        .collect();
    GridState1D { grid: Arc::clone(grid), values }
}

/// `σψ = kψ`.
pub fn apply_sigma_grid(state: &GridState1D) -> Result<GridState1D> {
    let values = state.values.iter().zip(state.kgrid()).map(|(v, k)| v * *k).collect();
    Ok(state.with_values(values))
}

/// `θψ = -i dψ/dk`: central differences inside, one-sided differences at both ends.
pub fn apply_theta_grid(state: &GridState1D) -> Result<GridState1D> {
    let k = state.kgrid();
    let v = &state.values;
    let n = k.len();
    let mi = Complex64::new(0.0, -1.0);
    let values = (0..n)
        .map(|j| {
            let (a, b) = match j {
                0 => (0, 1),
                j if j + 1 == n => (n - 2, n - 1),
                j => (j - 1, j + 1),
            };
            mi * (v[b] - v[a]) / (k[b] - k[a])
        })
        .collect();
    Ok(state.with_values(values))
}

/// `κψ = -i(k dψ/dk + ψ/2)`, written as `k^{-1/2}(-i d/du)k^{1/2}ψ` in `u = ln k`.
///
/// With the central stencil this is exactly `(θ₀k + kθ₀)/2` for the zero-ghost central
/// difference `θ₀`; with either stencil the matrix is Hermitian in the weight metric.
pub fn apply_kappa_grid(state: &GridState1D) -> Result<GridState1D> {
    let k = state.kgrid();
    let half: Vec<Complex64> = state.values.iter().zip(k).map(|(v, kj)| v * kj.sqrt()).collect();
    let d = state.grid.du(&half);
    let mi = Complex64::new(0.0, -1.0);
    let values = d.iter().zip(k).map(|(dv, kj)| mi * dv / kj.sqrt()).collect();
    Ok(state.with_values(values))
}

/// Dense matrix of a linear grid operator, built column by column.
pub fn operator_matrix(
    grid: &Arc<LogGrid>,
    op: fn(&GridState1D) -> Result<GridState1D>,
) -> Result<DMatrix<Complex64>> {
    let n = grid.len();
    let mut m = DMatrix::<Complex64>::zeros(n, n);
    for j in 0..n {
        let mut e = vec![Complex64::new(0.0, 0.0); n];
        e[j] = Complex64::new(1.0, 0.0);
        let col = op(&GridState1D::new(Arc::clone(grid), e)?)?;
        for (i, v) in col.values.iter().enumerate() {
            m[(i, j)] = *v;
        }
    }
    Ok(m)
}

/// `max|WA - (WA)†| / max|WA|`: zero iff `A` is Hermitian in the quadrature metric.
pub fn metric_asymmetry(grid: &LogGrid, a: &DMatrix<Complex64>) -> f64 {
    let w = grid.weights();
    let wa = DMatrix::from_fn(a.nrows(), a.ncols(), |i, j| a[(i, j)] * w[i]);
    let diff = (&wa - wa.adjoint()).map(|z| z.norm()).max();
    diff / wa.map(|z| z.norm()).max()
}

impl Fiducial1D {
    /// Window `[lo, hi]` outside of which `|η|²` has mass below `tol` on each side.
    pub fn mass_window(&self, tol: f64) -> (f64, f64) {
        gamma_window(self.p(), 2.0 * self.beta, tol)
    }
}

/// Tail quantiles of the Gamma(shape, rate) law: mass below `lo` and above `hi` are each
/// under `tol`. Located by bisection in `ln k` on the regularized incomplete gamma.
pub fn gamma_window(shape: f64, rate: f64, tol: f64) -> (f64, f64) {
    // first u in the bracket where the monotone predicate turns true
    let bisect = |f: &dyn Fn(f64) -> bool| {
        let (mut lo, mut hi) = (-700.0f64, 30.0f64);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if f(mid) {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        (lo, hi)
    };
    let (lower, _) = bisect(&|u: f64| gamma_lr(shape, rate * u.exp()) >= tol);
    let (_, upper) = bisect(&|u: f64| gamma_ur(shape, rate * u.exp()) < tol);
    (lower.exp(), upper.exp())
}

/// `∫_lo^hi f(k) dk` by the trapezoid rule in `ln k` with `points` nodes, for integrands
/// negligible at both ends.
pub fn log_trapezoid<F: Fn(f64) -> f64>(lo: f64, hi: f64, points: usize, f: F) -> f64 {
    let (u0, u1) = (lo.ln(), hi.ln());
    let h = (u1 - u0) / (points - 1) as f64;
    (0..points)
        .map(|j| {
            let k = (u0 + j as f64 * h).exp();
            h * k * f(k)
        })
        .sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::affine1d::overlap_1d;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn fid(a: f64, b: f64) -> Fiducial1D {
        Fiducial1D::new(a, b).unwrap()
    }

    #[test]
    fn too_few_points_is_rejected() {
        assert_eq!(
            LogGrid::new(1e-3, 10.0, 15, Stencil::Central).unwrap_err(),
            Error::GridTooCoarse { found: 15, min: 16 }
        );
    }

    #[test]
    fn mass_window_tails() {
        let f = fid(0.5, 1.0);
        let (lo, hi) = f.mass_window(1e-12);
        assert!(gamma_lr(2.0, 2.0 * lo) <= 1e-12);
        assert!(gamma_ur(2.0, 2.0 * hi) <= 1e-12);
        assert!(lo < 1e-4 && hi > 10.0);
    }

    #[test]
    fn identity_label_gives_fiducial_samples() {
        let f = fid(0.5, 1.0);
        let grid = Arc::new(LogGrid::for_fiducial(&f, 1.0, 1.0, 512, Stencil::Spectral).unwrap());
        let s = coherent_wavefunction(&f, &Label1D::identity(), &grid);
        for (v, k) in s.values().iter().zip(grid.k()) {
            assert_eq!(v.re, f.eval(*k).unwrap());
            assert_eq!(v.im, 0.0);
        }
    }

    #[test]
    fn grid_inner_products_match_closed_form() {
        let f = fid(0.5, 1.0);
        let l1 = Label1D::new(0.0, 1.0).unwrap();
        let l2 = Label1D::new(1.0, 1.0).unwrap();
        let grid = Arc::new(LogGrid::for_labels(&f, &[l1, l2], DEFAULT_POINTS, Stencil::Spectral).unwrap());
        let a = coherent_wavefunction(&f, &l1, &grid);
        let b = coherent_wavefunction(&f, &l2, &grid);
        assert!((a.norm() - 1.0).abs() < 1e-6);
        let ip = a.inner(&b).unwrap();
        assert!((ip - overlap_1d(&f, &l1, &l2)).norm() < 1e-6);
        assert!((ip - Complex64::new(0.48, 0.64)).norm() < 1e-6);
    }

    #[test]
    fn sigma_multiplies_by_k() {
        let f = fid(0.5, 1.0);
        let grid = Arc::new(LogGrid::for_fiducial(&f, 1.0, 1.0, 64, Stencil::Central).unwrap());
        let s = coherent_wavefunction(&f, &Label1D::identity(), &grid);
        let t = apply_sigma_grid(&s).unwrap();
        for j in 0..grid.len() {
            assert_eq!(t.values()[j], s.values()[j] * grid.k()[j]);
        }
    }

    #[test]
    fn kappa_is_hermitian_theta_is_not() {
        let f = fid(0.5, 1.0);
        for stencil in [Stencil::Central, Stencil::Spectral] {
            let grid = Arc::new(LogGrid::for_fiducial(&f, 1.0, 1.0, 128, stencil).unwrap());
            let kap = operator_matrix(&grid, apply_kappa_grid).unwrap();
            assert!(metric_asymmetry(&grid, &kap) < 1e-12);
            let th = operator_matrix(&grid, apply_theta_grid).unwrap();
            assert!(metric_asymmetry(&grid, &th) > 0.1);
        }
    }

    #[test]
    fn central_kappa_equals_symmetrized_theta_sigma() {
        // zero-ghost central θ₀ on the log grid, assembled as (θ₀k + kθ₀)/2
        let f = fid(1.0, 1.0);
        let grid = Arc::new(LogGrid::for_fiducial(&f, 1.0, 1.0, 40, Stencil::Central).unwrap());
        let k = grid.k();
        let n = k.len();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let v: Vec<Complex64> = (0..n).map(|_| Complex64::new(rng.random(), rng.random())).collect();
        let theta0 = |x: &[Complex64]| -> Vec<Complex64> {
            (0..n)
                .map(|j| {
                    let up = if j + 1 < n { x[j + 1] } else { Complex64::new(0.0, 0.0) };
                    let dn = if j > 0 { x[j - 1] } else { Complex64::new(0.0, 0.0) };
                    let kup = k[0] * ((j as f64 + 1.0) * grid.step()).exp();
                    let kdn = k[0] * ((j as f64 - 1.0) * grid.step()).exp();
                    Complex64::new(0.0, -1.0) * (up - dn) / (kup - kdn)
                })
                .collect()
        };
        let kv: Vec<Complex64> = v.iter().zip(k).map(|(a, b)| a * *b).collect();
        let t_k = theta0(&kv);
        let t_v = theta0(&v);
        let state = GridState1D::new(Arc::clone(&grid), v.clone()).unwrap();
        let kap = apply_kappa_grid(&state).unwrap();
        for j in 1..n - 1 {
            let sym = (t_k[j] + k[j] * t_v[j]) / 2.0;
            assert!((sym - kap.values()[j]).norm() < 1e-10 * (1.0 + sym.norm()));
        }
    }

    #[test]
    fn spectral_kappa_on_fiducial_matches_analytic_derivative() {
        // κη = -i(α + 1/2 - βk)η
        let f = fid(1.0, 1.5);
        let grid = Arc::new(LogGrid::for_fiducial(&f, 1.0, 1.0, 512, Stencil::Spectral).unwrap());
        let s = coherent_wavefunction(&f, &Label1D::identity(), &grid);
        let kap = apply_kappa_grid(&s).unwrap();
        // weighted L² error; pointwise error near k → 0 is roundoff divided by √k
        let err: f64 = grid
            .k()
            .iter()
            .enumerate()
            .map(|(j, &k)| {
                let exact = Complex64::new(0.0, -(f.alpha + 0.5 - f.beta * k) * f.eval(k).unwrap());
                (kap.values()[j] - exact).norm_sqr() * grid.weights()[j]
            })
            .sum::<f64>()
            .sqrt();
        assert!(err < 1e-10, "{err}");
    }
}
