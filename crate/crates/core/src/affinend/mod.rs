//! The generalized affine algebra on the cone of positive `n×n` matrices: `σ_ab = k_ab`,
//! `κ_a^b = -i[k_(ap)∂^{(bp)} + (n+1)/4 δ_a^b]`, coherent states `|F,S⟩` and their overlaps.

pub mod integrals;
pub mod poly;
pub mod testfn;

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::affine1d::{Fiducial1D, LocalExpansion};
use crate::diff::{fit_order, richardson};
use crate::error::{Error, Result};
use crate::matrix::{
    cholesky, complex_symlogdet, complexify, logdet_accretive, mat_exp, sample_sym_with, ComplexSymMatrix, GlPlusMatrix,
    SpdMatrix, SymMatrixR,
};
use rand::Rng;
use crate::special::{ln_kn_closed, omega_n};

pub use integrals::{
    admissibility_nd, kn, kn_quadrature, resolution_check_nd, AdmissibilityND, CoherentDensityND, KnEstimates,
    ResolutionCheckND,
};
pub use testfn::{
    apply_kappa_nd, apply_sigma_nd, commutator_residual, dilation_action, max_commutator_residual,
    sigma_conjugation_residual, unitarity_check, Commutator, ConeTestFunction, UnitarityCheck,
};

/// Fiducial vector `η(k) = C_n (det k)^α e^{-β tr k}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FiducialND {
    pub n: usize,
    pub alpha: f64,
    pub beta: f64,
}

impl FiducialND {
    /// Requires `β > 0` and `2α > (n−1)/2`, without which the group-averaged norm diverges.
    pub fn new(n: usize, alpha: f64, beta: f64) -> Result<Self> {
        if n == 0 {
            return Err(Error::Domain("dimension must be at least 1".into()));
        }
        if !(beta > 0.0) || !alpha.is_finite() {
            return Err(Error::Domain(format!("need finite α and β > 0, got α={alpha}, β={beta}")));
        }
        if !(2.0 * alpha > (n as f64 - 1.0) / 2.0) {
            return Err(Error::DivergentIntegral(format!("fiducial needs 2α > (n−1)/2, got n={n}, α={alpha}")));
        }
        Ok(Self { n, alpha, beta })
    }

    /// Independent entries of a symmetric matrix, `n(n+1)/2`.
    pub fn dim(&self) -> usize {
        self.n * (self.n + 1) / 2
    }

    /// Overlap exponent `2α + (n+1)/2`.
    pub fn p(&self) -> f64 {
        2.0 * self.alpha + (self.n as f64 + 1.0) / 2.0
    }

    /// `γ = β⁻¹[(n+1)/4 + α]`.
    pub fn gamma(&self) -> f64 {
        self.p() / (2.0 * self.beta)
    }

    pub fn ln_kn_2alpha(&self) -> f64 {
        ln_kn_closed(self.n, 2.0 * self.alpha).expect("checked in constructor")
    }

    /// `ln C_n` with `C_n² = (2β)^{2αn + n(n+1)/2} / K_n(2α)`.
    pub fn ln_cn(&self) -> f64 {
        let e = 2.0 * self.alpha * self.n as f64 + self.dim() as f64;
        0.5 * (e * (2.0 * self.beta).ln() - self.ln_kn_2alpha())
    }

    pub fn cn(&self) -> f64 {
        self.ln_cn().exp()
    }

    /// `K_n(2α − (n+1)/2) / K_n(2α)`.
    pub fn kn_ratio(&self) -> f64 {
        let shifted = ln_kn_closed(self.n, 2.0 * self.alpha - (self.n as f64 + 1.0) / 2.0).expect("checked in constructor");
        (shifted - self.ln_kn_2alpha()).exp()
    }

    /// `2^{-n}(4πβ)^{n(n+1)/2} Ω_n K_n(2α−(n+1)/2)/K_n(2α)`, the constant of the literal
    /// admissibility formula.
    pub fn nconst(&self) -> f64 {
        let n = self.n as i32;
        2f64.powi(-n) * (4.0 * std::f64::consts::PI * self.beta).powi(self.dim() as i32) * omega_n(self.n) * self.kn_ratio()
    }

    /// `∫ dF dG |F,G⟩⟨F,G| = N_res · 1` with `dF dG = ∏_{a≤b} dF_ab dG_ab`:
    /// `N_res = (4πβ)^{n(n+1)/2} 2^{-n(n-1)/2} K_n(2α−(n+1)/2)/K_n(2α)`.
    pub fn nconst_resolution(&self) -> f64 {
        let n = self.n as i32;
        (4.0 * std::f64::consts::PI * self.beta).powi(self.dim() as i32) * 2f64.powi(-n * (n - 1) / 2) * self.kn_ratio()
    }

    /// The resolution constant implied by the literal formulas, `2^n N / Ω_n`.
    pub fn nconst_resolution_printed(&self) -> f64 {
        2f64.powi(self.n as i32) * self.nconst() / omega_n(self.n)
    }

    pub fn eval(&self, k: &DMatrix<f64>) -> Result<f64> {
        let l = cholesky(k).map_err(|_| Error::ConeExit)?;
        let ln_det = 2.0 * l.diagonal().iter().map(|d| d.ln()).sum::<f64>();
        Ok((self.ln_cn() + self.alpha * ln_det - self.beta * k.trace()).exp())
    }

    pub fn to_1d(&self) -> Option<Fiducial1D> {
        (self.n == 1).then(|| Fiducial1D { alpha: self.alpha, beta: self.beta })
    }
}

/// Group label `(F, S)` with `det S > 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct LabelS {
    pub f: SymMatrixR,
    pub s: GlPlusMatrix,
}

/// Coherent-state label `(F, G)`, `G = (SᵀS)⁻¹` lower-index.
#[derive(Debug, Clone, PartialEq)]
pub struct LabelG {
    pub f: SymMatrixR,
    pub g: SpdMatrix,
}

impl LabelS {
    pub fn new(f: SymMatrixR, s: GlPlusMatrix) -> Result<Self> {
        if f.n() != s.n() {
            return Err(Error::DimensionMismatch { expected: s.n(), found: f.n() });
        }
        Ok(Self { f, s })
    }

    pub fn identity(n: usize) -> Self {
        Self { f: SymMatrixR::zeros(n), s: GlPlusMatrix::identity(n) }
    }

    pub fn n(&self) -> usize {
        self.s.n()
    }

    pub fn to_g(&self) -> LabelG {
        LabelG { f: self.f.clone(), g: s_to_g(&self.s) }
    }
}

impl LabelG {
    pub fn new(f: SymMatrixR, g: SpdMatrix) -> Result<Self> {
        if f.n() != g.n() {
            return Err(Error::DimensionMismatch { expected: g.n(), found: f.n() });
        }
        Ok(Self { f, g })
    }

    pub fn identity(n: usize) -> Self {
        Self { f: SymMatrixR::zeros(n), g: SpdMatrix::identity(n) }
    }

    pub fn n(&self) -> usize {
        self.g.n()
    }

    /// Upper-index `G⁻¹ = SᵀS`.
    pub fn g_upper(&self) -> SpdMatrix {
        self.g.inverse()
    }

    /// Random label with `F` entries of size `spread` and `G = exp(B)`, `B` symmetric with
    /// entries of size `spread/2`, so the condition number stays moderate.
    pub fn random<R: Rng>(rng: &mut R, n: usize, spread: f64) -> Self {
        let f = sample_sym_with(rng, n, spread);
        let b = sample_sym_with(rng, n, 0.5 * spread);
        let g = SpdMatrix::from_matrix(&SymMatrixR::mirror_upper(&mat_exp(b.as_matrix())).into_matrix())
            .expect("matrix exponential of a symmetric matrix is positive definite");
        Self { f, g }
    }
}

/// `(F₁,S₁)·(F₂,S₂) = (F₁ + S₁ᵀF₂S₁, S₂S₁)`, the law of `U(F,S) = e^{iFσ} D_S` with
/// `D_S ψ(k) = (det S)^{(n+1)/2} ψ(SkSᵀ)`.
pub fn compose(g1: &LabelS, g2: &LabelS) -> Result<LabelS> {
    let s1 = g1.s.as_matrix();
    let f = g1.f.add(&g2.f.congruence(s1));
    let s = GlPlusMatrix::new(g2.s.as_matrix() * s1)?;
    LabelS::new(f, s)
}

pub fn invert(g: &LabelS) -> Result<LabelS> {
    let si = g
        .s
        .as_matrix()
        .clone()
        .try_inverse()
        .ok_or_else(|| Error::IllConditioned("S is numerically singular".into()))?;
    let f = g.f.congruence(&si).scaled(-1.0);
    LabelS::new(f, GlPlusMatrix::new(si)?)
}

/// Lower-index `G = (SᵀS)⁻¹`; invariant under `S → MS` with `M` orthogonal.
pub fn s_to_g(s: &GlPlusMatrix) -> SpdMatrix {
    let m = s.as_matrix();
    let gu = SpdMatrix::from_matrix(&SymMatrixR::mirror_upper(&(m.transpose() * m)).into_matrix())
        .expect("SᵀS is positive definite for invertible S");
    gu.inverse()
}

/// `X = (A₁ + A₂)/2 + i(F₁ − F₂)/(2β)` for upper-index `A`.
fn x_matrix(beta: f64, a1: &DMatrix<f64>, a2: &DMatrix<f64>, f1: &SymMatrixR, f2: &SymMatrixR) -> Result<ComplexSymMatrix> {
    let re = SymMatrixR::mirror_upper(&(0.5 * (a1 + a2)));
    let im = f1.sub(f2).scaled(0.5 / beta);
    ComplexSymMatrix::new(&re, &im)
}

fn check_dims(fid: &FiducialND, ns: &[usize]) -> Result<()> {
    match ns.iter().find(|&&m| m != fid.n) {
        Some(&m) => Err(Error::DimensionMismatch { expected: fid.n, found: m }),
        None => Ok(()),
    }
}

/// `ln⟨F₁,G₁|F₂,G₂⟩ = p[½ ln det G₁⁻¹ + ½ ln det G₂⁻¹ − ln det X]` on the principal branch.
/// All three determinants go through the same pivoted elimination, so equal labels give
/// exactly zero.
pub fn log_overlap_nd(fid: &FiducialND, l1: &LabelG, l2: &LabelG) -> Result<Complex64> {
    check_dims(fid, &[l1.n(), l2.n()])?;
    let (u1, u2) = (l1.g_upper(), l2.g_upper());
    let x = x_matrix(fid.beta, u1.as_matrix(), u2.as_matrix(), &l1.f, &l2.f)?;
    let ld = complex_symlogdet(&x)?;
    let ld1 = logdet_accretive(&complexify(u1.as_matrix()))?;
    let ld2 = logdet_accretive(&complexify(u2.as_matrix()))?;
    Ok(fid.p() * (0.5 * (ld1 + ld2) - ld))
}

pub fn overlap_nd(fid: &FiducialND, l1: &LabelG, l2: &LabelG) -> Result<Complex64> {
    Ok(log_overlap_nd(fid, l1, l2)?.exp())
}

/// `ln⟨F₁,S₁|F₂,S₂⟩ = p[ln det S₁ + ln det S₂ − ln det((S₁ᵀS₁ + S₂ᵀS₂)/2 + i(F₁−F₂)/(2β))]`.
pub fn log_overlap_s(fid: &FiducialND, l1: &LabelS, l2: &LabelS) -> Result<Complex64> {
    check_dims(fid, &[l1.n(), l2.n()])?;
    let (s1, s2) = (l1.s.as_matrix(), l2.s.as_matrix());
    let x = x_matrix(fid.beta, &(s1.transpose() * s1), &(s2.transpose() * s2), &l1.f, &l2.f)?;
    let ld = complex_symlogdet(&x)?;
    Ok(fid.p() * (l1.s.det().ln() + l2.s.det().ln() - ld))
}

pub fn overlap_s(fid: &FiducialND, l1: &LabelS, l2: &LabelS) -> Result<Complex64> {
    Ok(log_overlap_s(fid, l1, l2)?.exp())
}

/// `⟨bra|tr(Σσ)|ket⟩ / ⟨bra|ket⟩ = p tr(X⁻¹Σ)/(2β)`.
pub fn mixed_symbol_sigma_nd(fid: &FiducialND, sigma: &SymMatrixR, bra: &LabelG, ket: &LabelG) -> Result<Complex64> {
    check_dims(fid, &[sigma.n(), bra.n(), ket.n()])?;
    let x = x_matrix(fid.beta, bra.g_upper().as_matrix(), ket.g_upper().as_matrix(), &bra.f, &ket.f)?;
    let xi = x
        .as_matrix()
        .clone()
        .try_inverse()
        .ok_or_else(|| Error::IllConditioned("singular overlap matrix".into()))?;
    let s = sigma.as_matrix().map(|v| Complex64::new(v, 0.0));
    Ok((xi * s).trace() * (fid.p() / (2.0 * fid.beta)))
}

/// Diagonal matrix element `⟨F,G|tr(Σσ)|F,G⟩ = γ tr(GΣ)`.
pub fn upper_symbol_sigma_nd(fid: &FiducialND, sigma: &SymMatrixR, label: &LabelG) -> f64 {
    fid.gamma() * (label.g.as_matrix() * sigma.as_matrix()).trace()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PolarizationResidualND {
    pub residual: f64,
    pub step_f: f64,
    pub step_g: f64,
}

/// Unit symmetric perturbation in the `(a,b)` entry: `E_aa`, or `E_ab + E_ba`.
fn sym_unit(n: usize, a: usize, b: usize) -> DMatrix<f64> {
    let mut e = DMatrix::zeros(n, n);
    e[(a, b)] = 1.0;
    e[(b, a)] = 1.0;
    e
}

/// `max_ab |{iG^{ap}∂/∂F^{pb} + β⁻¹G^{ap}∂/∂G^{pb} − γδ_a^b}⟨F,G|ψ⟩| / |⟨F,G|ψ⟩|` with
/// derivatives in the bra's `F` and upper-index `G`, Richardson-extrapolated.
/// Steps are `h·β·λ_min(G⁻¹)` in `F` and `h·λ_min(G⁻¹)` in `G⁻¹`.
pub fn polarization_residual_nd(fid: &FiducialND, label: &LabelG, psi: &LabelG, h: f64) -> Result<PolarizationResidualND> {
    check_dims(fid, &[label.n(), psi.n()])?;
    let n = fid.n;
    let gu = label.g_upper();
    let gu_m = gu.as_matrix().clone();
    let lam_min = gu_m.clone().symmetric_eigen().eigenvalues.min();
    let step_f = h * fid.beta * lam_min;
    let step_g = h * lam_min;
    let phi = |f: &DMatrix<f64>, a: &DMatrix<f64>| -> Complex64 {
        let bra = LabelG {
            f: SymMatrixR::mirror_upper(f),
            g: match SpdMatrix::from_matrix(&SymMatrixR::mirror_upper(a).into_matrix()) {
                Ok(m) => m.inverse(),
                Err(_) => return Complex64::new(f64::NAN, f64::NAN),
            },
        };
        overlap_nd(fid, &bra, psi).unwrap_or(Complex64::new(f64::NAN, f64::NAN))
    };
    let f0 = label.f.as_matrix().clone();
    let mut d_f = DMatrix::<Complex64>::zeros(n, n);
    let mut d_g = DMatrix::<Complex64>::zeros(n, n);
    for a in 0..n {
        for b in a..n {
            let e = sym_unit(n, a, b);
            let w = if a == b { 1.0 } else { 0.5 };
            let df = richardson(&|t| phi(&(&f0 + t * &e), &gu_m), 0.0, step_f) * w;
            let dg = richardson(&|t| phi(&f0, &(&gu_m + t * &e)), 0.0, step_g) * w;
            d_f[(a, b)] = df;
            d_f[(b, a)] = df;
            d_g[(a, b)] = dg;
            d_g[(b, a)] = dg;
        }
    }
    let val = phi(&f0, &gu_m);
    let guc = gu_m.map(|v| Complex64::new(v, 0.0));
    let r = &guc * d_f * Complex64::i() + &guc * d_g * Complex64::new(1.0 / fid.beta, 0.0)
        - DMatrix::<Complex64>::identity(n, n) * (val * fid.gamma());
    let worst = r.iter().map(|z| z.norm()).fold(0.0, f64::max);
    Ok(PolarizationResidualND { residual: worst / val.norm(), step_f, step_g })
}

/// Observed order of the extrapolated residual over steps `h0, h0/2, h0/4`.
pub fn polarization_order_nd(fid: &FiducialND, label: &LabelG, psi: &LabelG, h0: f64) -> Result<f64> {
    let hs = [h0, h0 / 2.0, h0 / 4.0];
    let mut errs = Vec::with_capacity(3);
    for &h in &hs {
        errs.push(polarization_residual_nd(fid, label, psi, h)?.residual);
    }
    Ok(fit_order(&hs, &errs))
}

/// Expands `ln⟨F+dF/2, G+dG/2 | F−dF/2, G−dG/2⟩ = i dθ − dΣ²/2 + …` against
/// `dθ = −γ tr(G dF)` and `dΣ² = (γ/2){β tr[(G⁻¹dG)²] + β⁻¹ tr[(G dF)²]}`.
pub fn local_expansion_nd(fid: &FiducialND, label: &LabelG, df: &SymMatrixR, dg: &SymMatrixR) -> Result<LocalExpansion> {
    check_dims(fid, &[label.n(), df.n(), dg.n()])?;
    let g = label.g.to_sym();
    let half_dg = dg.scaled(0.5);
    let plus = SpdMatrix::new(g.add(&half_dg)).map_err(|_| Error::ConeExit)?;
    let minus = SpdMatrix::new(g.sub(&half_dg)).map_err(|_| Error::ConeExit)?;
    let half_df = df.scaled(0.5);
    let bra = LabelG { f: label.f.add(&half_df), g: plus };
    let ket = LabelG { f: label.f.sub(&half_df), g: minus };
    let l = log_overlap_nd(fid, &bra, &ket)?;
    let gm = label.g.as_matrix();
    let gdf = gm * df.as_matrix();
    let gi_dg = label.g.inverse().as_matrix() * dg.as_matrix();
    let quad = fid.gamma() * (fid.beta * (&gi_dg * &gi_dg).trace() + (&gdf * &gdf).trace() / fid.beta);
    Ok(LocalExpansion {
        dtheta_num: l.im,
        dsigma2_num: -2.0 * l.re,
        dtheta_formula: -fid.gamma() * gdf.trace(),
        dsigma2_formula: quad / 2.0,
        dsigma2_printed: quad,
    })
}

/// Log-log slope of the expansion mismatch along `ε·(dF, dG)` for `ε = 1, 1/2, 1/4`.
pub fn expansion_order_nd(fid: &FiducialND, label: &LabelG, df: &SymMatrixR, dg: &SymMatrixR) -> Result<f64> {
    let eps = [1.0, 0.5, 0.25];
    let mut errs = Vec::with_capacity(3);
    for e in eps {
        errs.push(local_expansion_nd(fid, label, &df.scaled(e), &dg.scaled(e))?.mismatch());
    }
    Ok(fit_order(&eps, &errs))
}
