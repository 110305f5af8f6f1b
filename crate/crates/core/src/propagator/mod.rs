//! Propagators `⟨l_out| e^{-iHT} |l_in⟩` in the one-dimensional representation: an exact
//! grid oracle, closed-form label transport, time slicing and lattice actions.

pub mod action;
pub mod lower;
pub mod sliced;

use std::sync::Arc;

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::affine1d::{
    apply_kappa_grid, apply_sigma_grid, coherent_wavefunction, operator_matrix, overlap_1d, Fiducial1D,
    Generator1D, GridState1D, Label1D, LogGrid, Stencil,
};
use crate::error::{Error, Result};

pub use action::{
    action_evaluator, action_evaluator_nd, fit_lower_symbol, lower_symbol_verify, Action, LatticePath,
    LatticePathND, LowerSymbolCandidate, LowerSymbolCheck, LowerSymbolFit, SymbolChoice,
};
pub use lower::{gamma_lower, lower_symbol_1d};
pub use sliced::{
    semigroup_check, time_sliced_nd_smoke, time_sliced_propagator, FQuadrature, LabelQuadrature, NdSmoke,
    NdSmokeConfig, ShortTimeKernel, SlicedResult, SlicingConfig,
};

/// Default grid size for the eigendecomposition oracle.
pub const PROPAGATOR_POINTS: usize = 512;

/// Aliasing level the grid must reach for every label it carries.
pub const ALIAS_TOL: f64 = 1e-10;

/// One term `coef · (A₁A₂⋯)` of a grid-defined Hamiltonian.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridTerm {
    pub coef: f64,
    pub word: Vec<Generator1D>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum HamiltonianSpec1D {
    LinearSigma { c: f64 },
    LinearKappa { c: f64 },
    /// Hermitian part of `Σ coef · word` built from the grid generators.
    GridDefined { terms: Vec<GridTerm> },
}

impl HamiltonianSpec1D {
    /// `c` and the generator for the affine-linear kinds.
    pub fn linear(&self) -> Option<(f64, Generator1D)> {
        match *self {
            Self::LinearSigma { c } => Some((c, Generator1D::Sigma)),
            Self::LinearKappa { c } => Some((c, Generator1D::Kappa)),
            Self::GridDefined { .. } => None,
        }
    }

    /// Label reached from `l` under `e^{-iHt}`: `σ` shifts `F → F − ct`, `κ` maps
    /// `(F, G) → (e^{-ct}F, e^{ct}G)`.
    pub fn transport(&self, l: &Label1D, t: f64) -> Result<Label1D> {
        match self.linear() {
            Some((c, Generator1D::Sigma)) => Ok(Label1D { f: l.f - c * t, g: l.g }),
            Some((c, Generator1D::Kappa)) => Ok(Label1D { f: (-c * t).exp() * l.f, g: (c * t).exp() * l.g }),
            None => Err(Error::UnsupportedHamiltonian("label transport needs an affine-linear Hamiltonian".into())),
        }
    }
}

/// Closed-form `⟨l_out| e^{-iHT} |l_in⟩ = ⟨l_out|transport(l_in, T)⟩`.
pub fn analytic_propagator(fid: &Fiducial1D, h: &HamiltonianSpec1D, t: f64, l_out: &Label1D, l_in: &Label1D) -> Result<Complex64> {
    Ok(overlap_1d(fid, l_out, &h.transport(l_in, t)?))
}

#[derive(Debug, Clone)]
enum Spectrum {
    Diagonal(Vec<f64>),
    Eigen { values: Vec<f64>, vectors: DMatrix<Complex64> },
}

/// `e^{-iHt}` on a grid, diagonalized once in the symmetrized basis `W^{1/2} H W^{-1/2}`.
#[derive(Debug, Clone)]
pub struct GridPropagator {
    fid: Fiducial1D,
    grid: Arc<LogGrid>,
    sqrt_w: Vec<f64>,
    spectrum: Spectrum,
    asymmetry: f64,
}

fn generator_matrix(grid: &Arc<LogGrid>, g: Generator1D) -> Result<DMatrix<Complex64>> {
    match g {
        Generator1D::Sigma => operator_matrix(grid, apply_sigma_grid),
        Generator1D::Kappa => operator_matrix(grid, apply_kappa_grid),
    }
}

/// Log-spacing needed so that `e^{iFk}G^{-1/2}η(k/G)`, analytic in `u = ln k` on a strip of
/// half-width `π/2 − atan(|F|G/β)`, aliases below `ALIAS_TOL`.
fn required_step(fid: &Fiducial1D, labels: &[Label1D]) -> f64 {
    let worst = labels.iter().map(|l| (l.f * l.g / fid.beta).abs()).fold(0.0, f64::max);
    let strip = std::f64::consts::FRAC_PI_2 - worst.atan();
    std::f64::consts::PI * strip / (1.0 / ALIAS_TOL).ln()
}

impl GridPropagator {
    pub fn new(fid: &Fiducial1D, h: &HamiltonianSpec1D, grid: Arc<LogGrid>) -> Result<Self> {
        let n = grid.len();
        let sqrt_w: Vec<f64> = grid.weights().iter().map(|w| w.sqrt()).collect();
        let hat = |m: &DMatrix<Complex64>| DMatrix::from_fn(n, n, |i, j| m[(i, j)] * (sqrt_w[i] / sqrt_w[j]));
        let (spectrum, asymmetry) = match h {
            HamiltonianSpec1D::LinearSigma { c } => (Spectrum::Diagonal(grid.k().iter().map(|k| c * k).collect()), 0.0),
            _ => {
                let mut acc = DMatrix::<Complex64>::zeros(n, n);
                let terms = match h {
                    HamiltonianSpec1D::LinearKappa { c } => vec![GridTerm { coef: *c, word: vec![Generator1D::Kappa] }],
                    HamiltonianSpec1D::GridDefined { terms } => terms.clone(),
                    HamiltonianSpec1D::LinearSigma { .. } => unreachable!(),
                };
                let sig = hat(&generator_matrix(&grid, Generator1D::Sigma)?);
                let kap = hat(&generator_matrix(&grid, Generator1D::Kappa)?);
                for term in &terms {
                    let mut m = DMatrix::<Complex64>::identity(n, n);
                    for g in &term.word {
                        m = match g {
                            Generator1D::Sigma => m * &sig,
                            Generator1D::Kappa => m * &kap,
                        };
                    }
                    acc += m * Complex64::new(term.coef, 0.0);
                }
                let scale = acc.iter().map(|z| z.norm()).fold(f64::MIN_POSITIVE, f64::max);
                let asym = (&acc - acc.adjoint()).iter().map(|z| z.norm()).fold(0.0, f64::max) / scale;
                let herm = (&acc + acc.adjoint()) * Complex64::new(0.5, 0.0);
                let eig = herm.symmetric_eigen();
                (Spectrum::Eigen { values: eig.eigenvalues.iter().copied().collect(), vectors: eig.eigenvectors }, asym)
            }
        };
        Ok(Self { fid: *fid, grid, sqrt_w, spectrum, asymmetry })
    }

    /// Grid sized for `labels` and, for affine-linear `h`, their transports up to `t_max`.
    /// Fails with `GridTooCoarse` when `points` cannot resolve the oscillation of any label.
    pub fn for_labels(fid: &Fiducial1D, h: &HamiltonianSpec1D, labels: &[Label1D], t_max: f64, points: usize) -> Result<Self> {
        let mut all: Vec<Label1D> = labels.to_vec();
        if h.linear().is_some() {
            for l in labels {
                all.push(h.transport(l, t_max)?);
                all.push(h.transport(l, -t_max)?);
            }
        }
        let grid = LogGrid::for_labels(fid, &all, points, Stencil::Spectral)?;
        let span = grid.k().last().expect("nonempty").ln() - grid.k()[0].ln();
        let needed = (span / required_step(fid, &all)).ceil() as usize + 1;
        if needed > points {
            return Err(Error::GridTooCoarse { found: points, min: needed });
        }
        Self::new(fid, h, Arc::new(grid))
    }

    pub fn grid(&self) -> &Arc<LogGrid> {
        &self.grid
    }

    /// Relative anti-Hermitian part of the grid Hamiltonian before symmetrization.
    pub fn asymmetry(&self) -> f64 {
        self.asymmetry
    }

    /// `e^{-iHt} ψ`.
    pub fn evolve(&self, psi: &GridState1D, t: f64) -> Result<GridState1D> {
        if !Arc::ptr_eq(psi.grid(), &self.grid) {
            return Err(Error::Domain("state lives on a different grid".into()));
        }
        let hat: Vec<Complex64> = psi.values().iter().zip(&self.sqrt_w).map(|(v, s)| v * s).collect();
        let out: Vec<Complex64> = match &self.spectrum {
            Spectrum::Diagonal(d) => hat.iter().zip(d).map(|(v, e)| v * Complex64::from_polar(1.0, -e * t)).collect(),
            Spectrum::Eigen { values, vectors } => {
                let v = nalgebra::DVector::from_vec(hat);
                let mut c = vectors.adjoint() * v;
                for (ci, e) in c.iter_mut().zip(values) {
                    *ci *= Complex64::from_polar(1.0, -e * t);
                }
                (vectors * c).iter().copied().collect()
            }
        };
        let values = out.iter().zip(&self.sqrt_w).map(|(v, s)| v / s).collect();
        GridState1D::new(Arc::clone(&self.grid), values)
    }

    pub fn amplitude(&self, t: f64, l_out: &Label1D, l_in: &Label1D) -> Result<Complex64> {
        let psi_in = coherent_wavefunction(&self.fid, l_in, &self.grid);
        let psi_out = coherent_wavefunction(&self.fid, l_out, &self.grid);
        psi_out.inner(&self.evolve(&psi_in, t)?)
    }
}

/// `⟨l_out| e^{-iHT} |l_in⟩` from a fresh `PROPAGATOR_POINTS` grid.
pub fn grid_propagator(fid: &Fiducial1D, h: &HamiltonianSpec1D, t: f64, l_out: &Label1D, l_in: &Label1D) -> Result<Complex64> {
    GridPropagator::for_labels(fid, h, &[*l_out, *l_in], t.abs(), PROPAGATOR_POINTS)?.amplitude(t, l_out, l_in)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn fid() -> Fiducial1D {
        Fiducial1D::new(0.5, 1.0).unwrap()
    }

    #[test]
    fn analytic_examples() {
        let f = fid();
        let id = Label1D::identity();
        let v = analytic_propagator(&f, &HamiltonianSpec1D::LinearSigma { c: 1.0 }, 1.0, &id, &id).unwrap();
        assert!((v - Complex64::new(0.48, -0.64)).norm() < 1e-14);
        let zero = analytic_propagator(&f, &HamiltonianSpec1D::LinearKappa { c: 0.0 }, 3.0, &id, &id).unwrap();
        assert!((zero - 1.0).norm() < 1e-15);
        let grid = HamiltonianSpec1D::GridDefined { terms: vec![] };
        assert!(matches!(analytic_propagator(&f, &grid, 1.0, &id, &id), Err(Error::UnsupportedHamiltonian(_))));
    }

    #[test]
    fn grid_matches_analytic() {
        let f = Fiducial1D::new(1.0, 2.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for h in [HamiltonianSpec1D::LinearSigma { c: 1.0 }, HamiltonianSpec1D::LinearKappa { c: 0.7 }] {
            let a = Label1D::new(rng.random_range(-1.0..1.0), rng.random_range(0.5..2.0)).unwrap();
            let b = Label1D::new(rng.random_range(-1.0..1.0), rng.random_range(0.5..2.0)).unwrap();
            let prop = GridPropagator::for_labels(&f, &h, &[a, b], 2.0, PROPAGATOR_POINTS).unwrap();
            for t in [0.0, 0.3, 1.0, 2.0] {
                let g = prop.amplitude(t, &a, &b).unwrap();
                let e = analytic_propagator(&f, &h, t, &a, &b).unwrap();
                assert!((g - e).norm() < 1e-5, "{h:?} t={t} {g} {e}");
            }
        }
    }

    #[test]
    fn grid_defined_hamiltonian() {
        let f = Fiducial1D::new(1.0, 2.0).unwrap();
        let a = Label1D::new(0.2, 1.0).unwrap();
        // the Hermitian part of σκ is (σκ + κσ)/2; a word equal to a linear kind reproduces it
        let h = HamiltonianSpec1D::GridDefined { terms: vec![GridTerm { coef: 0.7, word: vec![Generator1D::Kappa] }] };
        let p = GridPropagator::for_labels(&f, &h, &[a], 1.0, 256).unwrap();
        assert!(p.asymmetry() < 1e-8);
        let lin = HamiltonianSpec1D::LinearKappa { c: 0.7 };
        let e = analytic_propagator(&f, &lin, 1.0, &a, &a).unwrap();
        let window = GridPropagator::for_labels(&f, &lin, &[a], 1.0, 256).unwrap();
        let g = GridPropagator::new(&f, &h, Arc::clone(window.grid())).unwrap().amplitude(1.0, &a, &a).unwrap();
        assert!((g - e).norm() < 1e-5);
        let sk = HamiltonianSpec1D::GridDefined {
            terms: vec![GridTerm { coef: 0.3, word: vec![Generator1D::Sigma, Generator1D::Kappa] }],
        };
        let p = GridPropagator::for_labels(&f, &sk, &[a], 1.0, 256).unwrap();
        let v = p.amplitude(0.5, &a, &a).unwrap();
        assert!(v.norm() <= 1.0 + 1e-10);
        assert!(p.asymmetry() > 1e-3);
    }

    #[test]
    fn unitarity_and_short_times() {
        let f = Fiducial1D::new(1.0, 2.0).unwrap();
        let a = Label1D::new(0.3, 1.3).unwrap();
        let h = HamiltonianSpec1D::LinearKappa { c: 1.0 };
        let p = GridPropagator::for_labels(&f, &h, &[a], 1.0, 384).unwrap();
        assert!((p.amplitude(0.0, &a, &a).unwrap() - 1.0).norm() < 1e-8);
        for t in [0.1, 0.5, 1.0] {
            assert!(p.amplitude(t, &a, &a).unwrap().norm() <= 1.0 + 1e-10);
        }
    }

    #[test]
    fn too_coarse_grid_is_rejected() {
        let f = fid();
        let a = Label1D::new(30.0, 1.0).unwrap();
        let h = HamiltonianSpec1D::LinearSigma { c: 1.0 };
        assert!(matches!(GridPropagator::for_labels(&f, &h, &[a], 1.0, 64), Err(Error::GridTooCoarse { .. })));
    }
}
