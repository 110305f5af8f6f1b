//! Lattice actions for the formal path integral, and lower-symbol candidates for `H = cσ`.

use num_complex::Complex64;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::HamiltonianSpec1D;
use crate::affine1d::{log_overlap_1d, overlap_1d, upper_symbol_1d, CoherentDensity1D, Fiducial1D, Label1D, MIN_RESOLUTION_SAMPLES};
use crate::affinend::{upper_symbol_sigma_nd, FiducialND, LabelG};
use crate::diff::richardson;
use crate::error::{Error, Result};
use crate::matrix::{SpdMatrix, SymMatrixR};
use crate::par::{integrate, McConfig};

/// Labels `l_0, …, l_{M+1}` at equal time steps `T/(M+1)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LatticePath {
    labels: Vec<Label1D>,
    ttotal: f64,
}

impl LatticePath {
    pub fn new(labels: Vec<Label1D>, ttotal: f64) -> Result<Self> {
        if labels.len() < 2 {
            return Err(Error::Domain("a lattice path needs both endpoints".into()));
        }
        if !(ttotal > 0.0) {
            return Err(Error::Domain(format!("path duration must be positive, got {ttotal}")));
        }
        if let Some(l) = labels.iter().find(|l| !(l.g > 0.0)) {
            return Err(Error::Domain(format!("label G must be positive, got {}", l.g)));
        }
        Ok(Self { labels, ttotal })
    }

    pub fn labels(&self) -> &[Label1D] {
        &self.labels
    }

    pub fn dt(&self) -> f64 {
        self.ttotal / (self.labels.len() - 1) as f64
    }
}

/// Which phase-space function stands in for `H` in the action.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum SymbolChoice {
    Upper,
    /// `c γ_h G` for `H = cσ`.
    LowerCandidate { gamma_h: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Action {
    /// `Σ_t [−γ₁ Ḡ ΔF − H(l̄) Δt]` at step midpoints.
    pub phase: f64,
    /// `Σ_t (γ₁/2ν)[β⁻¹Ḡ²(ΔF/Δt)² + βḠ⁻²(ΔG/Δt)²]Δt`, zero without `ν`.
    pub wiener: f64,
}

fn symbol_1d(fid: &Fiducial1D, h: &HamiltonianSpec1D, choice: SymbolChoice, l: &Label1D) -> Result<f64> {
    let (c, which) = h
        .linear()
        .ok_or_else(|| Error::UnsupportedHamiltonian("lattice actions need an affine-linear H".into()))?;
    match choice {
        SymbolChoice::Upper => Ok(c * upper_symbol_1d(fid, which, l)),
        SymbolChoice::LowerCandidate { gamma_h } => match which {
            crate::affine1d::Generator1D::Sigma => Ok(c * gamma_h * l.g),
            crate::affine1d::Generator1D::Kappa => {
                Err(Error::UnsupportedHamiltonian("lower-symbol candidates exist only for H = cσ".into()))
            }
        },
    }
}

pub fn action_evaluator(
    fid: &Fiducial1D,
    path: &LatticePath,
    h: &HamiltonianSpec1D,
    choice: SymbolChoice,
    nu: Option<f64>,
) -> Result<Action> {
    let dt = path.dt();
    let g1 = fid.gamma1();
    let mut phase = 0.0;
    let mut kinetic = 0.0;
    for w in path.labels.windows(2) {
        let (a, b) = (w[0], w[1]);
        let mid = Label1D { f: 0.5 * (a.f + b.f), g: 0.5 * (a.g + b.g) };
        let (df, dg) = (b.f - a.f, b.g - a.g);
        phase += -g1 * mid.g * df - symbol_1d(fid, h, choice, &mid)? * dt;
        kinetic += (mid.g * mid.g * df * df / fid.beta + fid.beta * dg * dg / (mid.g * mid.g)) / dt;
    }
    let wiener = match nu {
        Some(nu) if nu.is_finite() && nu > 0.0 => g1 / (2.0 * nu) * kinetic,
        Some(nu) if !nu.is_finite() => 0.0,
        Some(nu) => return Err(Error::Domain(format!("ν must be positive, got {nu}"))),
        None => 0.0,
    };
    Ok(Action { phase, wiener })
}

#[derive(Debug, Clone, PartialEq)]
pub struct LatticePathND {
    labels: Vec<LabelG>,
    ttotal: f64,
}

impl LatticePathND {
    pub fn new(labels: Vec<LabelG>, ttotal: f64) -> Result<Self> {
        if labels.len() < 2 || !(ttotal > 0.0) {
            return Err(Error::Domain("a lattice path needs both endpoints and a positive duration".into()));
        }
        let n = labels[0].n();
        if let Some(l) = labels.iter().find(|l| l.n() != n) {
            return Err(Error::DimensionMismatch { expected: n, found: l.n() });
        }
        Ok(Self { labels, ttotal })
    }

    pub fn labels(&self) -> &[LabelG] {
        &self.labels
    }

    pub fn dt(&self) -> f64 {
        self.ttotal / (self.labels.len() - 1) as f64
    }
}

/// Trace forms for `H = c tr(Σσ)` with its upper symbol `cγ tr(GΣ)`:
/// phase `Σ[−γ tr(Ḡ ΔF) − H Δt]`, kinetic `(γ/2ν)Σ[β⁻¹tr((ḠΔF)²) + β tr((Ḡ⁻¹ΔG)²)]/Δt`.
pub fn action_evaluator_nd(
    fid: &FiducialND,
    path: &LatticePathND,
    c: f64,
    sigma: &SymMatrixR,
    nu: Option<f64>,
) -> Result<Action> {
    let dt = path.dt();
    let gam = fid.gamma();
    let mut phase = 0.0;
    let mut kinetic = 0.0;
    for w in path.labels.windows(2) {
        let (a, b) = (&w[0], &w[1]);
        let gbar = SpdMatrix::new(a.g.to_sym().add(&b.g.to_sym()).scaled(0.5))?;
        let mid = LabelG { f: a.f.add(&b.f).scaled(0.5), g: gbar.clone() };
        let df = b.f.sub(&a.f);
        let dg = b.g.to_sym().sub(&a.g.to_sym());
        let gdf = gbar.as_matrix() * df.as_matrix();
        let gidg = gbar.inverse().as_matrix() * dg.as_matrix();
        phase += -gam * gdf.trace() - c * upper_symbol_sigma_nd(fid, sigma, &mid) * dt;
        kinetic += ((&gdf * &gdf).trace() / fid.beta + fid.beta * (&gidg * &gidg).trace()) / dt;
    }
    let wiener = match nu {
        Some(nu) if nu.is_finite() && nu > 0.0 => gam / (2.0 * nu) * kinetic,
        Some(nu) if nu <= 0.0 => return Err(Error::Domain(format!("ν must be positive, got {nu}"))),
        _ => 0.0,
    };
    Ok(Action { phase, wiener })
}

/// Candidate lower symbols for `H = cσ`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum LowerSymbolCandidate {
    Zero,
    /// `h(F, G) = c γ_h G`.
    LinearG { gamma_h: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LowerSymbolCheck {
    /// `c⟨l1|σ|l2⟩ = −ic ∂/∂F₂ ⟨l1|F₂,G₂⟩`.
    pub lhs: Complex64,
    /// `N⁻¹∫ h(F,G) ⟨l1|F,G⟩⟨F,G|l2⟩ dF dG`.
    pub rhs: Complex64,
    pub stderr: f64,
    /// `N⁻¹∫ G ⟨l1|F,G⟩⟨F,G|l2⟩ dF dG`, the coefficient of `cγ_h` in `rhs`.
    pub g_moment: Complex64,
    pub g_moment_stderr: f64,
}

impl LowerSymbolCheck {
    pub fn z_score(&self) -> f64 {
        (self.lhs - self.rhs).norm() / self.stderr.max(f64::MIN_POSITIVE)
    }
}

/// `⟨l1|σ|l2⟩` by Richardson differentiation of the overlap in the ket's `F`.
fn sigma_element(fid: &Fiducial1D, l1: &Label1D, l2: &Label1D) -> Complex64 {
    let step = 1e-2 * fid.beta / l2.g;
    let d = richardson(&|f| overlap_1d(fid, l1, &Label1D { f, g: l2.g }), l2.f, step);
    -Complex64::i() * d
}

pub fn lower_symbol_verify(
    fid: &Fiducial1D,
    c: f64,
    candidate: LowerSymbolCandidate,
    l1: &Label1D,
    l2: &Label1D,
    mc: &McConfig,
) -> Result<LowerSymbolCheck> {
    if mc.samples < MIN_RESOLUTION_SAMPLES {
        return Err(Error::Domain(format!("lower-symbol check needs at least {MIN_RESOLUTION_SAMPLES} samples")));
    }
    let q1 = CoherentDensity1D::new(fid, *l1);
    let q2 = CoherentDensity1D::new(fid, *l2);
    let ln_n = fid.nconst().ln();
    let [m] = integrate(mc, |rng: &mut ChaCha8Rng| {
        let x = if rng.random::<bool>() { q1.sample(rng) } else { q2.sample(rng) };
        let ln_q = crate::affine1d::ln_mean_exp(q1.ln_density(&x), q2.ln_density(&x));
        [(log_overlap_1d(fid, l1, &x) + log_overlap_1d(fid, &x, l2) - ln_n - ln_q).exp() * x.g]
    });
    let coef = match candidate {
        LowerSymbolCandidate::Zero => 0.0,
        LowerSymbolCandidate::LinearG { gamma_h } => c * gamma_h,
    };
    Ok(LowerSymbolCheck {
        lhs: c * sigma_element(fid, l1, l2),
        rhs: m.mean * coef,
        stderr: m.stderr * coef.abs(),
        g_moment: m.mean,
        g_moment_stderr: m.stderr,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LowerSymbolFit {
    pub gamma_h: f64,
    pub stderr: f64,
    /// Value for which `cγ_h G` is exactly the lower symbol of `cσ`: `(α − 1/2)/β`.
    pub exact: f64,
    pub pairs: usize,
}

impl LowerSymbolFit {
    /// 95% normal interval.
    pub fn interval(&self) -> (f64, f64) {
        (self.gamma_h - 1.96 * self.stderr, self.gamma_h + 1.96 * self.stderr)
    }
}

/// Least-squares `γ_h` in `⟨l1|σ|l2⟩ ≈ γ_h N⁻¹∫G⟨l1|x⟩⟨x|l2⟩` over label pairs; needs `α > 1`
/// for the `G`-weighted sandwich to have finite variance.
pub fn fit_lower_symbol(fid: &Fiducial1D, pairs: &[(Label1D, Label1D)], mc: &McConfig) -> Result<LowerSymbolFit> {
    if pairs.is_empty() {
        return Err(Error::Domain("lower-symbol fit needs at least one label pair".into()));
    }
    let (mut num, mut den, mut var) = (0.0, 0.0, 0.0);
    let mut checks = Vec::with_capacity(pairs.len());
    for (i, (a, b)) in pairs.iter().enumerate() {
        let cfg = mc.with_seed(mc.seed.wrapping_add(i as u64));
        let chk = lower_symbol_verify(fid, 1.0, LowerSymbolCandidate::Zero, a, b, &cfg)?;
        num += (chk.g_moment.conj() * chk.lhs).re;
        den += chk.g_moment.norm_sqr();
        checks.push(chk);
    }
    let gamma_h = num / den;
    for chk in &checks {
        var += chk.g_moment.norm_sqr() * chk.g_moment_stderr.powi(2);
    }
    let stderr = gamma_h.abs() * var.sqrt() / den;
    Ok(LowerSymbolFit { gamma_h, stderr, exact: (fid.alpha - 0.5) / fid.beta, pairs: pairs.len() })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::affine1d::{mixed_symbol_1d, Generator1D};
    use approx::assert_relative_eq;

    #[test]
    fn constant_path_is_silent() {
        let fid = Fiducial1D::new(1.0, 1.0).unwrap();
        let l = Label1D::new(0.2, 1.5).unwrap();
        let path = LatticePath::new(vec![l; 5], 1.0).unwrap();
        let h = HamiltonianSpec1D::LinearSigma { c: 0.0 };
        let a = action_evaluator(&fid, &path, &h, SymbolChoice::Upper, Some(2.0)).unwrap();
        assert_eq!((a.phase, a.wiener), (0.0, 0.0));
    }

    #[test]
    fn single_step_phase_and_kinetic_scaling() {
        let fid = Fiducial1D::new(1.0, 1.0).unwrap();
        let eps = 1e-3;
        let path = LatticePath::new(vec![Label1D::new(0.0, 1.0).unwrap(), Label1D::new(eps, 1.0).unwrap()], 1.0).unwrap();
        let h = HamiltonianSpec1D::LinearSigma { c: 0.0 };
        let a = action_evaluator(&fid, &path, &h, SymbolChoice::Upper, Some(1.0)).unwrap();
        assert_relative_eq!(a.phase, -fid.gamma1() * eps, max_relative = 1e-14);
        let b = action_evaluator(&fid, &path, &h, SymbolChoice::Upper, Some(4.0)).unwrap();
        assert_relative_eq!(a.wiener, 4.0 * b.wiener, max_relative = 1e-14);
        let none = action_evaluator(&fid, &path, &h, SymbolChoice::Upper, None).unwrap();
        assert_eq!(none.wiener, 0.0);
    }

    #[test]
    fn nd_action_reduces_to_one_dimension() {
        let fid1 = Fiducial1D::new(0.8, 1.3).unwrap();
        let fid = FiducialND::new(1, 0.8, 1.3).unwrap();
        let ls = [(0.1, 1.0), (0.3, 1.4), (0.2, 0.9)];
        let p1 = LatticePath::new(ls.iter().map(|&(f, g)| Label1D::new(f, g).unwrap()).collect(), 0.7).unwrap();
        let pn = LatticePathND::new(
            ls.iter()
                .map(|&(f, g)| LabelG { f: SymMatrixR::from_diagonal(&[f]), g: SpdMatrix::from_diagonal(&[g]).unwrap() })
                .collect(),
            0.7,
        )
        .unwrap();
        let h = HamiltonianSpec1D::LinearSigma { c: 0.6 };
        let a = action_evaluator(&fid1, &p1, &h, SymbolChoice::Upper, Some(3.0)).unwrap();
        let b = action_evaluator_nd(&fid, &pn, 0.6, &SymMatrixR::identity(1), Some(3.0)).unwrap();
        assert_relative_eq!(a.phase, b.phase, max_relative = 1e-13);
        assert_relative_eq!(a.wiener, b.wiener, max_relative = 1e-13);
    }

    #[test]
    fn lower_symbol_examples() {
        let fid = Fiducial1D::new(0.5, 1.0).unwrap();
        let id = Label1D::identity();
        let mc = McConfig::new(20_000, 4);
        let chk = lower_symbol_verify(&fid, 1.0, LowerSymbolCandidate::Zero, &id, &id, &mc).unwrap();
        assert!((chk.lhs - 1.0).norm() < 1e-9);
        assert_eq!(chk.rhs, Complex64::new(0.0, 0.0));
        let (a, b) = (Label1D::new(0.3, 0.8).unwrap(), Label1D::new(-0.4, 1.5).unwrap());
        let closed = mixed_symbol_1d(&fid, Generator1D::Sigma, &a, &b) * overlap_1d(&fid, &a, &b);
        assert!((sigma_element(&fid, &a, &b) - closed).norm() < 1e-9);
    }

    #[test]
    fn lower_symbol_fit_recovers_coefficient() {
        let fid = Fiducial1D::new(2.0, 1.0).unwrap();
        let pairs: Vec<(Label1D, Label1D)> = [(0.0, 1.0, 0.0, 1.0), (0.2, 0.8, -0.3, 1.4), (0.5, 1.2, 0.1, 0.7)]
            .iter()
            .map(|&(a, b, c, d)| (Label1D::new(a, b).unwrap(), Label1D::new(c, d).unwrap()))
            .collect();
        let fit = fit_lower_symbol(&fid, &pairs, &McConfig::new(100_000, 9)).unwrap();
        assert!((fit.gamma_h - fit.exact).abs() < 4.0 * fit.stderr + 1e-3, "{fit:?}");
        let (lo, hi) = fit.interval();
        assert!(lo < hi);
        let chk = lower_symbol_verify(&fid, 0.7, LowerSymbolCandidate::LinearG { gamma_h: fit.exact }, &pairs[1].0, &pairs[1].1, &McConfig::new(100_000, 1)).unwrap();
        assert!(chk.z_score() < 4.0, "{chk:?}");
    }
}
