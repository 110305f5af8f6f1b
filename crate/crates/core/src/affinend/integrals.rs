//! Cone and group integrals: `K_n`, the admissibility constant and the resolution of unity.

use std::f64::consts::PI;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{ChiSquared, Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::{log_overlap_nd, overlap_nd, FiducialND, LabelG};
use crate::affine1d::grid::gamma_window;
use crate::affine1d::{log_trapezoid, ln_mean_exp, ResolutionCheck, MIN_RESOLUTION_SAMPLES};
use crate::error::{Error, Result};
use crate::matrix::{cholesky, lower_triangular_inverse, spd_sqrt_pair, SpdMatrix, SymMatrixR};
use crate::measures::Wishart;
use crate::par::{integrate, integrate_one, Estimate, McConfig};
use crate::special::{gauss_legendre_on, ln_gamma, ln_kn_closed, ln_multigamma, omega_n};

/// Three independent evaluations of `K_n(a) = ∫_{k≻0} (det k)^a e^{-tr k} ∏_{i≤j} dk_ij`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KnEstimates {
    pub n: usize,
    pub a: f64,
    /// `Γ_n(a + (n+1)/2)`.
    pub closed: f64,
    /// `(2^n/Ω_n) ∫ |det Q|^{2a+1} e^{-tr QᵀQ} dQ` over all real `n×n` matrices.
    pub gaussian: Estimate,
    /// Direct importance sampling on the cone in Cholesky coordinates.
    pub cone: Estimate,
}

impl KnEstimates {
    /// The Gaussian-form integral with the prefactor `2^{n-1}/Ω_n`, divided by `closed`.
    pub fn half_prefactor_ratio(&self) -> f64 {
        0.5 * self.gaussian.re() / self.closed
    }
}

fn check_kn(n: usize, a: f64) -> Result<f64> {
    if n == 0 {
        return Err(Error::Domain("dimension must be at least 1".into()));
    }
    Ok(ln_kn_closed(n, a)?.exp())
}

/// Scale of the off-diagonal Cholesky proposal; the target has variance 1/2.
const CONE_PROPOSAL_VAR: f64 = 0.75;

pub fn kn(n: usize, a: f64, mc: &McConfig) -> Result<KnEstimates> {
    let closed = check_kn(n, a)?;
    let nf = n as f64;
    let gauss_pref = 2f64.powi(n as i32) / omega_n(n) * PI.powf(nf * nf / 2.0);
    let sd = 0.5f64.sqrt();
    let gaussian = integrate_one(mc, |rng: &mut ChaCha8Rng| {
        let q = DMatrix::<f64>::from_fn(n, n, |_, _| sd * rng.sample::<f64, _>(StandardNormal));
        Complex64::new(gauss_pref * q.determinant().abs().powf(2.0 * a + 1.0), 0.0)
    });

    // k = LLᵀ, dk = 2^n ∏ L_ii^{n+1-i} dL, so the integrand in L is
    // 2^n ∏ L_ii^{2a+n+1-i} e^{-Σ L_ij²}. Diagonals are drawn as s·χ_{m_i} with
    // m_i = 2a+n+2-i and off-diagonals as N(0, s²).
    let s2 = CONE_PROPOSAL_VAR;
    let s = s2.sqrt();
    let ms: Vec<f64> = (1..=n).map(|i| 2.0 * a + nf + 2.0 - i as f64).collect();
    let chis: Vec<ChiSquared<f64>> = ms
        .iter()
        .map(|&m| ChiSquared::new(m).map_err(|e| Error::Domain(e.to_string())))
        .collect::<Result<_>>()?;
    let ln_chi_norm: Vec<f64> =
        ms.iter().map(|&m| -((m / 2.0 - 1.0) * 2f64.ln() + ln_gamma(m / 2.0) + m * s.ln())).collect();
    let ln_gauss_norm = -0.5 * (2.0 * PI * s2).ln();
    let cone = integrate_one(mc, |rng: &mut ChaCha8Rng| {
        let mut ln_w = nf * 2f64.ln();
        for i in 0..n {
            let l = s * chis[i].sample(rng).sqrt();
            let m = ms[i];
            ln_w += (2.0 * a + nf - i as f64) * l.ln() - l * l;
            ln_w -= ln_chi_norm[i] + (m - 1.0) * l.ln() - l * l / (2.0 * s2);
            for _ in 0..i {
                let x: f64 = s * rng.sample::<f64, _>(StandardNormal);
                ln_w += -x * x - (ln_gauss_norm - x * x / (2.0 * s2));
            }
        }
        Complex64::new(ln_w.exp(), 0.0)
    });
    Ok(KnEstimates { n, a, closed, gaussian, cone })
}

/// Deterministic quadrature of `K_n(a)` for `n ≤ 2`. For `n = 2` the substitution
/// `k₁₂ = √(k₁₁k₂₂) sin φ` separates the integral into
/// `[∫ t^{a+1/2} e^{-t} dt]² ∫_{-π/2}^{π/2} cos^{2a+1}φ dφ`.
pub fn kn_quadrature(n: usize, a: f64) -> Result<f64> {
    check_kn(n, a)?;
    // ∫ t^e e^{-t} dt
    let radial = |e: f64| {
        let (lo, hi) = gamma_window(e + 1.0, 1.0, 1e-17);
        log_trapezoid(lo, hi, 4000, |t| (e * t.ln() - t).exp())
    };
    match n {
        1 => Ok(radial(a)),
        2 => {
            let r = radial(a + 0.5);
            // cos^{2a+1} vanishes like a power at ±π/2; split at 0 and map φ = π/2 (1 − u^m)
            // so the endpoint behaves smoothly
            let m = 4.0;
            let (u, w) = gauss_legendre_on(200, 0.0, 1.0);
            let half: f64 = u
                .iter()
                .zip(&w)
                .map(|(&u, &w)| {
                    let phi = PI / 2.0 * (1.0 - u.powf(m));
                    let dphi = PI / 2.0 * m * u.powf(m - 1.0);
                    w * phi.cos().powf(2.0 * a + 1.0) * dphi
                })
                .sum();
            Ok(r * r * 2.0 * half)
        }
        _ => Err(Error::Domain(format!("quadrature route only for n ≤ 2, got {n}"))),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdmissibilityND {
    /// `2^{-n}(4πβ)^{n(n+1)/2} Ω_n K_n(2α−(n+1)/2)/K_n(2α)`.
    pub closed: f64,
    /// Exact value of `(2π)^{n(n+1)/2} ∫_{det S>0} dS (det S)^{-n} |η(SSᵀ)|²`, which is `closed/2`.
    pub closed_exact: f64,
    pub mc: Estimate,
}

impl AdmissibilityND {
    pub fn ratio(&self) -> f64 {
        self.mc.re() / self.closed
    }

    pub fn z_score_exact(&self) -> f64 {
        self.mc.z_score(Complex64::new(self.closed_exact, 0.0))
    }
}

/// Monte Carlo of the group-averaged norm over `det S > 0` with Gaussian `S_ab ~ N(0, 1/(4β))`.
pub fn admissibility_nd(fid: &FiducialND, mc: &McConfig) -> Result<AdmissibilityND> {
    let fid = FiducialND::new(fid.n, fid.alpha, fid.beta)?;
    let n = fid.n;
    let nf = n as f64;
    let closed = fid.nconst();
    let sd = (0.25 / fid.beta).sqrt();
    let ln_pref = 2.0 * fid.ln_cn() + nf * nf / 2.0 * (PI / (2.0 * fid.beta)).ln() + fid.dim() as f64 * (2.0 * PI).ln();
    let power = 4.0 * fid.alpha - nf;
    let est = integrate_one(mc, |rng: &mut ChaCha8Rng| {
        let s = DMatrix::<f64>::from_fn(n, n, |_, _| sd * rng.sample::<f64, _>(StandardNormal));
        let det = s.determinant();
        let v = if det > 0.0 { (ln_pref + power * det.ln()).exp() } else { 0.0 };
        Complex64::new(v, 0.0)
    });
    Ok(AdmissibilityND { closed, closed_exact: closed / 2.0, mc: est })
}

/// Sampler for `|⟨l|F,G⟩|² / N_res` on `(F, G)`, exact at `n = 1`.
///
/// With `G⁻¹_l = LLᵀ`, the frame `G⁻¹ = L H Lᵀ`, `F = F_l + L F̃ Lᵀ` has unit Jacobian on
/// `dF dG`. `H` is matrix beta-II from Wishart draws `V₂^{-1/2}V₁V₂^{-1/2}`, and
/// `F̃ = 2β A^{1/2} Z A^{1/2}` with `A = (I+H)/2` and `Z` from a multivariate t.
#[derive(Debug, Clone)]
pub struct CoherentDensityND {
    n: usize,
    beta: f64,
    f_l: DMatrix<f64>,
    chol: DMatrix<f64>,
    chol_inv: DMatrix<f64>,
    v1: Wishart,
    v2: Wishart,
    nu1: f64,
    nu2: f64,
    ln_beta_n: f64,
    nu_t: f64,
    tau: f64,
    chi_t: ChiSquared<f64>,
    ln_norm_t: f64,
}

impl CoherentDensityND {
    pub fn new(fid: &FiducialND, label: &LabelG) -> Result<Self> {
        let n = fid.n;
        let nf = n as f64;
        let d = fid.dim() as f64;
        let p = fid.p();
        let (nu1, nu2) = (2.0 * p - nf - 1.0, 2.0 * p);
        let id = SpdMatrix::identity(n);
        let v1 = Wishart::new(nu1, &id)?;
        let v2 = Wishart::new(nu2, &id)?;
        let ln_beta_n = ln_multigamma(n, nu1 / 2.0)? + ln_multigamma(n, nu2 / 2.0)? - ln_multigamma(n, (nu1 + nu2) / 2.0)?;
        let nu_t = (2.0 * p - d).max(1.0);
        let tau = ((nu_t + d) / (2.0 * p * nu_t)).sqrt();
        let chol = label.g_upper().cholesky_factor().clone();
        let chol_inv = lower_triangular_inverse(&chol);
        let ln_norm_t = ln_gamma((nu_t + d) / 2.0) - ln_gamma(nu_t / 2.0) - d / 2.0 * (nu_t * PI).ln() - d * tau.ln();
        Ok(Self {
            n,
            beta: fid.beta,
            f_l: label.f.as_matrix().clone(),
            chol,
            chol_inv,
            v1,
            v2,
            nu1,
            nu2,
            ln_beta_n,
            nu_t,
            tau,
            chi_t: ChiSquared::new(nu_t).map_err(|e| Error::Domain(e.to_string()))?,
            ln_norm_t,
        })
    }

    fn sym(m: &DMatrix<f64>) -> DMatrix<f64> {
        0.5 * (m + m.transpose())
    }

    pub fn sample(&self, rng: &mut ChaCha8Rng) -> LabelG {
        let n = self.n;
        let v1 = self.v1.sample(rng).into_matrix();
        let v2 = self.v2.sample(rng).into_matrix();
        let (_, v2_is) = spd_sqrt_pair(&v2);
        let h = Self::sym(&(&v2_is * v1 * &v2_is));
        let a = 0.5 * (DMatrix::identity(n, n) + &h);
        let (a_s, _) = spd_sqrt_pair(&a);
        let w = (self.chi_t.sample(rng) / self.nu_t).sqrt();
        let mut z = DMatrix::<f64>::zeros(n, n);
        for i in 0..n {
            for j in i..n {
                let y = self.tau * rng.sample::<f64, _>(StandardNormal) / w;
                let v = if i == j { y } else { y / 2f64.sqrt() };
                z[(i, j)] = v;
                z[(j, i)] = v;
            }
        }
        let ft = 2.0 * self.beta * Self::sym(&(&a_s * z * &a_s));
        let f = &self.f_l + Self::sym(&(&self.chol * ft * self.chol.transpose()));
        let gu = Self::sym(&(&self.chol * h * self.chol.transpose()));
        let g = SpdMatrix::from_matrix(&gu).map(|m| m.inverse()).unwrap_or_else(|_| SpdMatrix::identity(n));
        LabelG { f: SymMatrixR::mirror_upper(&f), g }
    }

    pub fn ln_density(&self, x: &LabelG) -> f64 {
        let n = self.n;
        let nf = n as f64;
        let d = (n * (n + 1) / 2) as f64;
        let gu = x.g_upper();
        let h = Self::sym(&(&self.chol_inv * gu.as_matrix() * self.chol_inv.transpose()));
        let ft = Self::sym(&(&self.chol_inv * (x.f.as_matrix() - &self.f_l) * self.chol_inv.transpose()));
        let ln_det = |m: &DMatrix<f64>| match cholesky(m) {
            Ok(l) => 2.0 * l.diagonal().iter().map(|v| v.ln()).sum::<f64>(),
            Err(_) => f64::NAN,
        };
        let id = DMatrix::<f64>::identity(n, n);
        let ld_h = ln_det(&h);
        let ld_ih = ln_det(&(&id + &h));
        let ln_q_h = (self.nu1 - nf - 1.0) / 2.0 * ld_h - (self.nu1 + self.nu2) / 2.0 * ld_ih - self.ln_beta_n;
        let a = 0.5 * (&id + &h);
        let ld_a = ld_ih - nf * 2f64.ln();
        let (_, a_is) = spd_sqrt_pair(&a);
        let z = Self::sym(&(&a_is * ft * &a_is)) / (2.0 * self.beta);
        let mut r2 = 0.0;
        for i in 0..n {
            for j in i..n {
                let y = if i == j { z[(i, j)] } else { z[(i, j)] * 2f64.sqrt() };
                r2 += y * y;
            }
        }
        let ln_q_y = self.ln_norm_t - (self.nu_t + d) / 2.0 * (1.0 + r2 / (self.nu_t * self.tau * self.tau)).ln();
        let ln_q_z = ln_q_y + nf * (nf - 1.0) / 4.0 * 2f64.ln();
        let ln_q_ft = ln_q_z - d * (2.0 * self.beta).ln() - (nf + 1.0) / 2.0 * ld_a;
        ln_q_h + (nf + 1.0) * ld_h + ln_q_ft
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ResolutionCheckND {
    /// `N_res⁻¹ ∫ dF dG ⟨l1|F,G⟩⟨F,G|l2⟩` against `⟨l1|l2⟩`.
    pub check: ResolutionCheck,
    /// The same integral normalized by `2^{-n} Ω_n / N`, divided by the target.
    pub printed_ratio: f64,
}

pub fn resolution_check_nd(fid: &FiducialND, l1: &LabelG, l2: &LabelG, mc: &McConfig) -> Result<ResolutionCheckND> {
    if mc.samples < MIN_RESOLUTION_SAMPLES {
        return Err(Error::Domain(format!("resolution check needs at least {MIN_RESOLUTION_SAMPLES} samples")));
    }
    let fid = FiducialND::new(fid.n, fid.alpha, fid.beta)?;
    let q1 = CoherentDensityND::new(&fid, l1)?;
    let q2 = CoherentDensityND::new(&fid, l2)?;
    let ln_n = fid.nconst_resolution().ln();
    let [est] = integrate(mc, |rng: &mut ChaCha8Rng| {
        let x = if rng.random::<bool>() { q1.sample(rng) } else { q2.sample(rng) };
        let ln_q = ln_mean_exp(q1.ln_density(&x), q2.ln_density(&x));
        match (log_overlap_nd(&fid, l1, &x), log_overlap_nd(&fid, &x, l2)) {
            (Ok(a), Ok(b)) if ln_q.is_finite() => [(a + b - ln_n - ln_q).exp()],
            _ => [Complex64::new(0.0, 0.0)],
        }
    });
    let target = overlap_nd(&fid, l1, l2)?;
    let to_printed = fid.nconst_resolution() / fid.nconst_resolution_printed();
    let printed = est.mean * to_printed;
    let printed_ratio = (printed * target.conj()).re / target.norm_sqr();
    Ok(ResolutionCheckND {
        check: ResolutionCheck { estimate: est.mean, target, stderr: est.stderr, samples: est.samples },
        printed_ratio,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::affine1d::{CoherentDensity1D, Fiducial1D, Label1D};
    use crate::matrix::{sample_spd, sample_sym};
    use crate::special::gamma;
    use approx::assert_relative_eq;
    use rand::SeedableRng;

    fn label(n: usize, seed: u64) -> LabelG {
        LabelG { f: sample_sym(n, seed, 1.0), g: sample_spd(n, seed + 1, 1.0) }
    }

    #[test]
    fn kn_closed_examples() {
        let mc = McConfig::new(1000, 1);
        assert_relative_eq!(kn(1, 1.0, &mc).unwrap().closed, 1.0, max_relative = 1e-12);
        assert_relative_eq!(kn(2, 0.5, &mc).unwrap().closed, PI / 2.0, max_relative = 1e-12);
        assert!(matches!(kn(2, -1.0, &mc), Err(Error::DivergentIntegral(_))));
    }

    #[test]
    fn kn_quadrature_validates_closed_form() {
        for a in [0.0, 0.5, 1.0, 1.7, 3.0] {
            assert_relative_eq!(kn_quadrature(1, a).unwrap(), gamma(a + 1.0), max_relative = 1e-10);
            let closed = ln_kn_closed(2, a).unwrap().exp();
            assert_relative_eq!(kn_quadrature(2, a).unwrap(), closed, max_relative = 1e-9);
        }
        assert_relative_eq!(kn_quadrature(2, 0.5).unwrap(), PI / 2.0, max_relative = 1e-10);
    }

    #[test]
    fn kn_routes_agree() {
        let mc = McConfig::new(200_000, 5);
        for (n, a) in [(1, 1.0), (2, 0.5), (3, 1.0)] {
            let k = kn(n, a, &mc).unwrap();
            assert!(k.gaussian.z_score(Complex64::new(k.closed, 0.0)) < 4.0, "{k:?}");
            assert!(k.cone.z_score(Complex64::new(k.closed, 0.0)) < 4.0, "{k:?}");
            // the Gaussian route at n = 3 needs ~10⁶ samples for 1%
            assert!(k.gaussian.stderr < 0.02 * k.closed && k.cone.stderr < 0.01 * k.closed, "{k:?}");
        }
    }

    #[test]
    fn admissibility_matches_half_closed_form() {
        let mc = McConfig::new(200_000, 3);
        for (n, alpha, beta) in [(1, 1.0, 1.0), (2, 1.0, 1.0), (2, 1.3, 0.7)] {
            let fid = FiducialND::new(n, alpha, beta).unwrap();
            let adm = admissibility_nd(&fid, &mc).unwrap();
            assert!(adm.z_score_exact() < 4.0, "{adm:?}");
            assert!((adm.ratio() - 0.5).abs() < 0.02);
        }
        let fid = FiducialND { n: 2, alpha: 0.25, beta: 1.0 };
        assert!(matches!(admissibility_nd(&fid, &mc), Err(Error::DivergentIntegral(_))));
    }

    #[test]
    fn density_reduces_to_one_dimensional() {
        let fid = FiducialND::new(1, 0.7, 1.3).unwrap();
        let f1 = Fiducial1D::new(0.7, 1.3).unwrap();
        let l = LabelG { f: SymMatrixR::from_diagonal(&[0.4]), g: SpdMatrix::from_diagonal(&[1.7]).unwrap() };
        let qn = CoherentDensityND::new(&fid, &l).unwrap();
        let q1 = CoherentDensity1D::new(&f1, Label1D::new(0.4, 1.7).unwrap());
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..20 {
            let x = qn.sample(&mut rng);
            let x1 = Label1D::new(x.f.get(0, 0), x.g.as_matrix()[(0, 0)]).unwrap();
            assert_relative_eq!(qn.ln_density(&x), q1.ln_density(&x1), max_relative = 1e-10, epsilon = 1e-10);
        }
    }

    #[test]
    fn density_is_exact_for_its_own_label_in_one_dimension() {
        let fid = FiducialND::new(1, 0.7, 1.3).unwrap();
        let l = label(1, 8);
        let q = CoherentDensityND::new(&fid, &l).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let ln_n = fid.nconst_resolution().ln();
        for _ in 0..10 {
            let x = q.sample(&mut rng);
            let lo = log_overlap_nd(&fid, &l, &x).unwrap();
            assert_relative_eq!(2.0 * lo.re - ln_n, q.ln_density(&x), epsilon = 1e-10);
        }
    }

    #[test]
    fn resolution_two_dimensional() {
        let fid = FiducialND::new(2, 1.0, 1.0).unwrap();
        let mc = McConfig::new(100_000, 12);
        let (l1, l2) = (label(2, 30), label(2, 31));
        for (a, b) in [(&l1, &l1), (&l1, &l2)] {
            let r = resolution_check_nd(&fid, a, b, &mc).unwrap();
            assert!(r.check.z_score() < 4.0, "{r:?}");
            assert!(r.check.stderr < 0.01 * r.check.target.norm().max(0.05));
            assert!((r.printed_ratio - 0.5).abs() < 0.05, "{r:?}");
        }
    }
}
