//! One-dimensional affine coherent states `|F,G⟩ = e^{iFσ} e^{-i ln G κ} |η⟩` on
//! `L²(0, ∞)` with `[σ, κ] = iσ`, `σ = k`, `κ = -i(k d/dk + 1/2)`.

pub mod grid;

use std::f64::consts::PI;

use num_complex::Complex64;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{ChiSquared, Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::diff::{fit_order, richardson};
use crate::error::{Error, Result};
use crate::par::{integrate, McConfig};
use crate::special::ln_gamma;

pub use grid::{
    apply_kappa_grid, apply_sigma_grid, apply_theta_grid, coherent_wavefunction, log_trapezoid,
    metric_asymmetry, operator_matrix, GridState1D, LogGrid, Stencil,
};

/// Fiducial vector `η(k) = C₁ k^α e^{-βk}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Fiducial1D {
    pub alpha: f64,
    pub beta: f64,
}

impl Fiducial1D {
    pub fn new(alpha: f64, beta: f64) -> Result<Self> {
        if !(alpha > 0.0 && beta > 0.0 && alpha.is_finite() && beta.is_finite()) {
            return Err(Error::Domain(format!("fiducial needs α, β > 0, got α={alpha}, β={beta}")));
        }
        Ok(Self { alpha, beta })
    }

    /// Overlap exponent `2α + 1`.
    pub fn p(&self) -> f64 {
        2.0 * self.alpha + 1.0
    }

    pub fn ln_c1(&self) -> f64 {
        self.p() / 2.0 * (2.0 * self.beta).ln() - 0.5 * ln_gamma(self.p())
    }

    pub fn c1(&self) -> f64 {
        self.ln_c1().exp()
    }

    /// `γ₁ = (α + 1/2)/β`.
    pub fn gamma1(&self) -> f64 {
        (self.alpha + 0.5) / self.beta
    }

    /// Resolution-of-unity constant `N = 2πβ/α`.
    pub fn nconst(&self) -> f64 {
        2.0 * PI * self.beta / self.alpha
    }

    pub fn eval(&self, k: f64) -> Result<f64> {
        if !(k > 0.0) {
            return Err(Error::Domain(format!("η(k) is defined for k > 0, got {k}")));
        }
        Ok(self.eval_unchecked(k))
    }

    pub(crate) fn eval_unchecked(&self, k: f64) -> f64 {
        (self.ln_c1() + self.alpha * k.ln() - self.beta * k).exp()
    }
}

/// Label `(F, G)` with `G = e^B > 0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Label1D {
    pub f: f64,
    pub g: f64,
}

impl Label1D {
    pub fn new(f: f64, g: f64) -> Result<Self> {
        if !(g > 0.0 && g.is_finite() && f.is_finite()) {
            return Err(Error::Domain(format!("label needs finite F and G > 0, got ({f}, {g})")));
        }
        Ok(Self { f, g })
    }

    pub fn identity() -> Self {
        Self { f: 0.0, g: 1.0 }
    }

    pub fn b(&self) -> f64 {
        self.g.ln()
    }
}

/// Denominator `(1/G₁ + 1/G₂)/2 + i(F₁ − F₂)/2β` of the overlap kernel.
fn kernel_denominator(fid: &Fiducial1D, l1: &Label1D, l2: &Label1D) -> Complex64 {
    Complex64::new(0.5 * (1.0 / l1.g + 1.0 / l2.g), (l1.f - l2.f) / (2.0 * fid.beta))
}

/// Principal `ln⟨l1|l2⟩`.
pub fn log_overlap_1d(fid: &Fiducial1D, l1: &Label1D, l2: &Label1D) -> Complex64 {
    let d = kernel_denominator(fid, l1, l2);
    fid.p() * (Complex64::new(-0.5 * (l1.g * l2.g).ln(), 0.0) - d.ln())
}

/// `⟨l1|l2⟩ = [(G₁G₂)^{-1/2} / D]^{2α+1}`, principal branch (`Re D > 0`).
pub fn overlap_1d(fid: &Fiducial1D, l1: &Label1D, l2: &Label1D) -> Complex64 {
    log_overlap_1d(fid, l1, l2).exp()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Generator1D {
    Sigma,
    Kappa,
}

/// Coherent-state upper symbol: `σ → γ₁G`, `κ → γ₁GF`.
pub fn upper_symbol_1d(fid: &Fiducial1D, which: Generator1D, label: &Label1D) -> f64 {
    match which {
        Generator1D::Sigma => fid.gamma1() * label.g,
        Generator1D::Kappa => fid.gamma1() * label.g * label.f,
    }
}

/// Upper symbol `⟨l|A|l⟩` of a grid operator by quadrature.
pub fn upper_symbol_grid(
    fid: &Fiducial1D,
    op: fn(&GridState1D) -> Result<GridState1D>,
    label: &Label1D,
    grid: &std::sync::Arc<LogGrid>,
) -> Result<f64> {
    let psi = coherent_wavefunction(fid, label, grid);
    Ok(psi.inner(&op(&psi)?)?.re)
}

/// Mixed symbol `⟨bra|A|ket⟩ / ⟨bra|ket⟩`, from `σ|F,G⟩ = -i∂_F|F,G⟩` and
/// `κ|F,G⟩ = (iG∂_G − iF∂_F)|F,G⟩`.
pub fn mixed_symbol_1d(fid: &Fiducial1D, which: Generator1D, bra: &Label1D, ket: &Label1D) -> Complex64 {
    let p = fid.p();
    let d = kernel_denominator(fid, bra, ket);
    let sigma = p / (2.0 * fid.beta * d);
    match which {
        Generator1D::Sigma => sigma,
        Generator1D::Kappa => {
            let i = Complex64::i();
            ket.f * sigma - i * p / 2.0 + i * p / (2.0 * ket.g * d)
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Admissibility1D {
    pub closed: f64,
    pub quadrature: f64,
}

/// `N = 2π ∫ k⁻¹ |η|² dk`: closed form `2πβ/α` and a quadrature estimate.
pub fn admissibility_1d(fid: &Fiducial1D) -> Admissibility1D {
    // k⁻¹|η|² ∝ Gamma(2α, rate 2β) density
    let (lo, hi) = grid::gamma_window(2.0 * fid.alpha, 2.0 * fid.beta, 1e-15);
    let quad = log_trapezoid(lo, hi, 4096, |k| fid.eval_unchecked(k).powi(2) / k);
    Admissibility1D { closed: fid.nconst(), quadrature: 2.0 * PI * quad }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Moments1D {
    pub norm: f64,
    pub mean_sigma: f64,
    pub mean_kappa: f64,
    pub mean_sigma_quad: f64,
    pub mean_kappa_quad: f64,
    pub var_sigma: f64,
    pub var_kappa: f64,
}

impl Moments1D {
    /// `var σ · var κ − ⟨σ⟩²/4`, relative to `⟨σ⟩²/4`.
    pub fn uncertainty_gap(&self) -> f64 {
        let bound = self.mean_sigma_quad.powi(2) / 4.0;
        (self.var_sigma * self.var_kappa - bound) / bound
    }
}

/// Moments of `σ` and `κ` in the fiducial, with `κη = -i(α + 1/2 − βk)η`.
pub fn moments_1d(fid: &Fiducial1D) -> Moments1D {
    let (lo, hi) = grid::gamma_window(fid.p(), 2.0 * fid.beta, 1e-18);
    let pts = 4096;
    let rho = |k: f64| fid.eval_unchecked(k).powi(2);
    let norm = log_trapezoid(lo, hi, pts, rho);
    let m1 = log_trapezoid(lo, hi, pts, |k| k * rho(k));
    let m2 = log_trapezoid(lo, hi, pts, |k| k * k * rho(k));
    let c = fid.alpha + 0.5;
    // ⟨η|κη⟩ = -i ∫ (c − βk) η² dk; its real part vanishes identically
    let kap_im = -log_trapezoid(lo, hi, pts, |k| (c - fid.beta * k) * rho(k));
    let kap2 = log_trapezoid(lo, hi, pts, |k| (c - fid.beta * k).powi(2) * rho(k));
    Moments1D {
        norm,
        mean_sigma: fid.gamma1(),
        mean_kappa: 0.0,
        mean_sigma_quad: m1,
        mean_kappa_quad: kap_im,
        var_sigma: m2 - m1 * m1,
        var_kappa: kap2 - kap_im * kap_im,
    }
}

/// Step floor below which relative steps lose precision.
pub const MIN_STEP: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PolarizationResidual {
    pub residual: f64,
    pub step_f: f64,
    pub step_g: f64,
    /// The `G` step was cut to `G/4` to keep `G ± step` on the half-line.
    pub clamped: bool,
}

/// Steps `h·β/G` in `F` and `max(h·G, MIN_STEP)` in `G`, the latter capped at `G/4`.
fn polarization_steps(fid: &Fiducial1D, g: f64, h: f64) -> (f64, f64, bool) {
    let step_f = h * fid.beta / g;
    let mut step_g = (h * g).max(MIN_STEP);
    let clamped = step_g > 0.25 * g;
    if clamped {
        step_g = 0.25 * g;
    }
    (step_f, step_g, clamped)
}

/// `|[iG⁻¹∂_F − β⁻¹G∂_G − γ₁]⟨F,G|ψ⟩| / |⟨F,G|ψ⟩|` with Richardson-extrapolated
/// central differences in the bra label.
pub fn polarization_residual_1d(fid: &Fiducial1D, label: &Label1D, psi: &Label1D, h: f64) -> PolarizationResidual {
    let (step_f, step_g, clamped) = polarization_steps(fid, label.g, h);
    let phi = |f: f64, g: f64| overlap_1d(fid, &Label1D { f, g }, psi);
    let d_f = richardson(&|f| phi(f, label.g), label.f, step_f);
    let d_g = richardson(&|g| phi(label.f, g), label.g, step_g);
    let val = phi(label.f, label.g);
    let i = Complex64::i();
    let r = i * d_f / label.g - label.g / fid.beta * d_g - fid.gamma1() * val;
    PolarizationResidual { residual: r.norm() / val.norm(), step_f, step_g, clamped }
}

/// Observed order of the extrapolated residual over steps `h0, h0/2, h0/4`.
pub fn polarization_order_1d(fid: &Fiducial1D, label: &Label1D, psi: &Label1D, h0: f64) -> f64 {
    let hs = [h0, h0 / 2.0, h0 / 4.0];
    let errs: Vec<f64> = hs.iter().map(|&h| polarization_residual_1d(fid, label, psi, h).residual).collect();
    fit_order(&hs, &errs)
}

/// Numerical and closed-form symplectic potential and ray metric.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LocalExpansion {
    pub dtheta_num: f64,
    pub dsigma2_num: f64,
    pub dtheta_formula: f64,
    pub dsigma2_formula: f64,
    /// Ray metric with the coefficient `γ₁` in place of `γ₁/2`.
    pub dsigma2_printed: f64,
}

impl LocalExpansion {
    pub fn mismatch(&self) -> f64 {
        (self.dtheta_num - self.dtheta_formula).abs() + (self.dsigma2_num - self.dsigma2_formula).abs()
    }

    pub fn mismatch_printed(&self) -> f64 {
        (self.dtheta_num - self.dtheta_formula).abs() + (self.dsigma2_num - self.dsigma2_printed).abs()
    }
}

/// Expands `ln⟨l + dl/2 | l − dl/2⟩ = i dθ − dΣ²/2 + …`.
pub fn local_expansion_1d(fid: &Fiducial1D, label: &Label1D, df: f64, dg: f64) -> Result<LocalExpansion> {
    if label.g - dg.abs() / 2.0 <= 0.0 {
        return Err(Error::ConeExit);
    }
    let bra = Label1D { f: label.f + df / 2.0, g: label.g + dg / 2.0 };
    let ket = Label1D { f: label.f - df / 2.0, g: label.g - dg / 2.0 };
    let l = log_overlap_1d(fid, &bra, &ket);
    let g = label.g;
    let quad = fid.gamma1() * (g * g * df * df / fid.beta + fid.beta * dg * dg / (g * g));
    Ok(LocalExpansion {
        dtheta_num: l.im,
        dsigma2_num: -2.0 * l.re,
        dtheta_formula: -fid.gamma1() * g * df,
        dsigma2_formula: quad / 2.0,
        dsigma2_printed: quad,
    })
}

/// Log-log slope of the expansion mismatch along `ε·(dF, dG)` for `ε = 1, 1/2, 1/4`.
pub fn expansion_order_1d(fid: &Fiducial1D, label: &Label1D, df: f64, dg: f64) -> Result<f64> {
    let eps = [1.0, 0.5, 0.25];
    let mut errs = Vec::with_capacity(3);
    for e in eps {
        errs.push(local_expansion_1d(fid, label, e * df, e * dg)?.mismatch());
    }
    Ok(fit_order(&eps, &errs))
}

/// Sampler for the density `|⟨l|F,G⟩|²/N` on `(F, G)`.
///
/// In the frame `G = G_l G̃`, `F = F_l + F̃/G_l` (unit Jacobian) the density factors:
/// `H = 1/G̃` is beta-prime with shapes `(2α, 2α+1)` and, given `G̃`,
/// `F̃ = 2βA·T/√ν` with `A = (1+H)/2` and `T` Student-t with `ν = 4α+1` degrees of freedom.
#[derive(Debug, Clone, Copy)]
pub struct CoherentDensity1D {
    label: Label1D,
    beta: f64,
    a: f64,
    b: f64,
    nu: f64,
    ln_norm_h: f64,
    ln_norm_t: f64,
    chi1: ChiSquared<f64>,
    chi2: ChiSquared<f64>,
    chi_t: ChiSquared<f64>,
}

impl CoherentDensity1D {
    pub fn new(fid: &Fiducial1D, label: Label1D) -> Self {
        let p = fid.p();
        let (a, b) = (p - 1.0, p);
        let nu = 2.0 * p - 1.0;
        let chi = |k: f64| ChiSquared::new(k).expect("positive degrees of freedom");
        Self {
            label,
            beta: fid.beta,
            a,
            b,
            nu,
            ln_norm_h: ln_gamma(a + b) - ln_gamma(a) - ln_gamma(b),
            ln_norm_t: ln_gamma((nu + 1.0) / 2.0) - ln_gamma(nu / 2.0) - 0.5 * (nu * PI).ln(),
            chi1: chi(2.0 * a),
            chi2: chi(2.0 * b),
            chi_t: chi(nu),
        }
    }

    pub fn sample(&self, rng: &mut ChaCha8Rng) -> Label1D {
        let h = self.chi1.sample(rng) / self.chi2.sample(rng);
        let a = 0.5 * (1.0 + h);
        let z: f64 = rng.sample(StandardNormal);
        let t = z / (self.chi_t.sample(rng) / self.nu).sqrt();
        let ft = 2.0 * self.beta * a * t / self.nu.sqrt();
        Label1D { f: self.label.f + ft / self.label.g, g: self.label.g / h }
    }

    pub fn ln_density(&self, x: &Label1D) -> f64 {
        let h = self.label.g / x.g;
        let a = 0.5 * (1.0 + h);
        let ft = (x.f - self.label.f) * self.label.g;
        let t = ft * self.nu.sqrt() / (2.0 * self.beta * a);
        let ln_h = self.ln_norm_h + (self.a - 1.0) * h.ln() - (self.a + self.b) * (1.0 + h).ln() + 2.0 * h.ln();
        let ln_t = self.ln_norm_t - (self.nu + 1.0) / 2.0 * (1.0 + t * t / self.nu).ln() + 0.5 * self.nu.ln()
            - (2.0 * self.beta * a).ln();
        ln_h + ln_t
    }
}

/// Monte Carlo estimate of a resolution-of-unity sandwich against its target.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ResolutionCheck {
    pub estimate: Complex64,
    pub target: Complex64,
    pub stderr: f64,
    pub samples: usize,
}

impl ResolutionCheck {
    pub fn z_score(&self) -> f64 {
        (self.estimate - self.target).norm() / self.stderr.max(f64::MIN_POSITIVE)
    }

    /// `|estimate| / |target|`.
    pub fn ratio(&self) -> f64 {
        self.estimate.norm() / self.target.norm()
    }
}

pub const MIN_RESOLUTION_SAMPLES: usize = 10_000;

/// `N⁻¹ ∫ dF dG ⟨l1|F,G⟩⟨F,G|l2⟩` by importance sampling from the even mixture of
/// `|⟨l1|·⟩|²/N` and `|⟨l2|·⟩|²/N`; weights are bounded by 1.
pub fn resolution_check_1d(fid: &Fiducial1D, l1: &Label1D, l2: &Label1D, mc: &McConfig) -> Result<ResolutionCheck> {
    if mc.samples < MIN_RESOLUTION_SAMPLES {
        return Err(Error::Domain(format!("resolution check needs at least {MIN_RESOLUTION_SAMPLES} samples")));
    }
    let q1 = CoherentDensity1D::new(fid, *l1);
    let q2 = CoherentDensity1D::new(fid, *l2);
    let ln_n = fid.nconst().ln();
    let [est] = integrate(mc, |rng| {
        let x = if rng.random::<bool>() { q1.sample(rng) } else { q2.sample(rng) };
        let ln_q = ln_mean_exp(q1.ln_density(&x), q2.ln_density(&x));
        let num = log_overlap_1d(fid, l1, &x) + log_overlap_1d(fid, &x, l2);
        [(num - ln_n - ln_q).exp()]
    });
    Ok(ResolutionCheck { estimate: est.mean, target: overlap_1d(fid, l1, l2), stderr: est.stderr, samples: est.samples })
}

/// `ln((e^a + e^b)/2)` without overflow.
pub(crate) fn ln_mean_exp(a: f64, b: f64) -> f64 {
    let m = a.max(b);
    m + (0.5 * ((a - m).exp() + (b - m).exp())).ln()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;
    use rand::SeedableRng;

    fn half_one() -> Fiducial1D {
        Fiducial1D::new(0.5, 1.0).unwrap()
    }

    fn l(f: f64, g: f64) -> Label1D {
        Label1D::new(f, g).unwrap()
    }

    #[test]
    fn fiducial_values() {
        let f = Fiducial1D::new(1.0, 1.0).unwrap();
        assert_relative_eq!(f.c1(), 2.0, max_relative = 1e-14);
        assert_relative_eq!(f.eval(1.0).unwrap(), 2.0 / std::f64::consts::E, max_relative = 1e-14);
        assert!(half_one().eval(1e-300).unwrap() < 1e-149);
        assert!(f.eval(0.0).is_err());
        assert!(Fiducial1D::new(0.0, 1.0).is_err());
        assert!(Label1D::new(0.0, -1.0).is_err());
    }

    #[test]
    fn overlap_examples() {
        let f = half_one();
        assert_eq!(overlap_1d(&f, &l(0.3, 2.0), &l(0.3, 2.0)), Complex64::new(1.0, 0.0));
        let z = overlap_1d(&f, &l(0.0, 1.0), &l(1.0, 1.0));
        assert_relative_eq!(z.re, 0.48, max_relative = 1e-14);
        assert_relative_eq!(z.im, 0.64, max_relative = 1e-14);
        assert_relative_eq!(z.norm(), 0.8, max_relative = 1e-14);
        assert_eq!(overlap_1d(&f, &l(1.0, 1.0), &l(0.0, 1.0)), z.conj());
    }

    #[test]
    fn admissibility_examples() {
        let a = admissibility_1d(&Fiducial1D::new(1.0, 1.0).unwrap());
        assert_relative_eq!(a.closed, 2.0 * PI);
        assert!((a.quadrature / a.closed - 1.0).abs() < 1e-3);
        let b = admissibility_1d(&Fiducial1D::new(1.0, 2.0).unwrap());
        assert_relative_eq!(b.closed, 4.0 * PI);
        assert!((b.quadrature / b.closed - 1.0).abs() < 1e-3);
    }

    #[test]
    fn moments_examples() {
        let m = moments_1d(&half_one());
        assert!((m.norm - 1.0).abs() < 1e-12);
        assert_eq!(m.mean_sigma, 1.0);
        assert!((m.mean_sigma_quad - 1.0).abs() < 1e-12);
        assert!(m.mean_kappa_quad.abs() < 1e-12);
        assert!((m.var_sigma - 0.5).abs() < 1e-12);
        assert!((m.var_kappa - 0.5).abs() < 1e-12);
        assert!(m.uncertainty_gap().abs() < 1e-10);
    }

    #[test]
    fn upper_symbols() {
        let f = half_one();
        assert_eq!(upper_symbol_1d(&f, Generator1D::Sigma, &l(0.7, 1.0)), 1.0);
        assert_eq!(upper_symbol_1d(&f, Generator1D::Kappa, &l(0.0, 3.0)), 0.0);
        let grid = std::sync::Arc::new(LogGrid::for_fiducial(&f, 2.0, 2.0, 1024, Stencil::Spectral).unwrap());
        let s = upper_symbol_grid(&f, apply_sigma_grid, &l(0.4, 2.0), &grid).unwrap();
        assert!((s - 2.0).abs() < 1e-6);
        let k = upper_symbol_grid(&f, apply_kappa_grid, &l(0.4, 2.0), &grid).unwrap();
        assert!((k - upper_symbol_1d(&f, Generator1D::Kappa, &l(0.4, 2.0))).abs() < 1e-6);
    }

    #[test]
    fn mixed_symbol_reduces_to_upper_symbol_on_diagonal() {
        let f = Fiducial1D::new(1.3, 0.7).unwrap();
        let x = l(-0.4, 1.7);
        for w in [Generator1D::Sigma, Generator1D::Kappa] {
            let m = mixed_symbol_1d(&f, w, &x, &x);
            assert!((m - upper_symbol_1d(&f, w, &x)).norm() < 1e-13);
        }
    }

    #[test]
    fn polarization_examples() {
        let f = half_one();
        let r = polarization_residual_1d(&f, &l(0.3, 1.4), &Label1D::identity(), 1e-3);
        assert!(r.residual < 1e-6 && !r.clamped);
        let order = polarization_order_1d(&f, &l(0.3, 1.4), &l(-0.5, 0.8), 0.02);
        assert!(order > 3.5, "{order}");
        let tiny = polarization_residual_1d(&f, &l(0.0, 1e-9), &Label1D::identity(), 1e-3);
        assert!(tiny.clamped);
    }

    #[test]
    fn local_expansion_examples() {
        let f = half_one();
        let zero = local_expansion_1d(&f, &Label1D::identity(), 0.0, 0.0).unwrap();
        assert_eq!(zero.dtheta_num, 0.0);
        assert_eq!(zero.dsigma2_num, 0.0);
        let eps = 1e-3;
        let e = local_expansion_1d(&f, &Label1D::identity(), eps, 0.0).unwrap();
        assert_relative_eq!(e.dtheta_formula, -eps);
        assert_relative_eq!(e.dsigma2_printed, eps * eps);
        assert_relative_eq!(e.dsigma2_formula, eps * eps / 2.0);
        assert!((e.dsigma2_num / e.dsigma2_formula - 1.0).abs() < 1e-5);
        let order = expansion_order_1d(&f, &l(0.2, 1.3), 0.02, 0.03).unwrap();
        assert!(order > 2.7, "{order}");
        assert!(local_expansion_1d(&f, &l(0.0, 0.1), 0.0, 0.3).is_err());
    }

    #[test]
    fn coherent_density_matches_overlap_squared() {
        let f = Fiducial1D::new(0.8, 1.3).unwrap();
        let lab = l(0.3, 0.7);
        let q = CoherentDensity1D::new(&f, lab);
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..50 {
            let x = q.sample(&mut rng);
            let direct = 2.0 * log_overlap_1d(&f, &lab, &x).re - f.nconst().ln();
            assert!((q.ln_density(&x) - direct).abs() < 1e-10);
        }
    }

    #[test]
    fn resolution_examples() {
        let f = half_one();
        let mc = McConfig::new(20_000, 5);
        let same = resolution_check_1d(&f, &Label1D::identity(), &Label1D::identity(), &mc).unwrap();
        assert!((same.estimate - 1.0).norm() < 1e-12);
        let r = resolution_check_1d(&f, &l(0.0, 1.0), &l(1.0, 1.0), &mc).unwrap();
        assert!(r.z_score() < 3.0, "{r:?}");
        let r2 = resolution_check_1d(&f, &l(0.0, 1.0), &l(1.0, 1.0), &mc.with_samples(80_000)).unwrap();
        let shrink = r.stderr / r2.stderr;
        assert!((shrink - 2.0).abs() < 0.2, "{shrink}");
        assert!(resolution_check_1d(&f, &l(0.0, 1.0), &l(1.0, 1.0), &mc.with_samples(100)).is_err());
    }

    proptest! {
        #[test]
        fn overlap_is_hermitian_and_bounded(
            f1 in -3.0..3.0f64, g1 in 0.2..5.0f64, f2 in -3.0..3.0f64, g2 in 0.2..5.0f64,
            alpha in 0.1..3.0f64, beta in 0.2..3.0f64,
        ) {
            let fid = Fiducial1D::new(alpha, beta).unwrap();
            let (a, b) = (l(f1, g1), l(f2, g2));
            let z = overlap_1d(&fid, &a, &b);
            prop_assert_eq!(z, overlap_1d(&fid, &b, &a).conj());
            prop_assert!(z.norm() <= 1.0 + 1e-15);
        }

        #[test]
        fn polarization_holds_for_any_state(
            f1 in -2.0..2.0f64, g1 in 0.3..3.0f64, f2 in -2.0..2.0f64, g2 in 0.3..3.0f64,
        ) {
            let r = polarization_residual_1d(&half_one(), &l(f1, g1), &l(f2, g2), 1e-3);
            prop_assert!(r.residual < 1e-6);
        }
    }
}
