//! Analytic test functions `Σ_t P_t(k) (det k)^{q_t} e^{-tr(Ck)}` on the cone, closed under
//! `σ_ab`, `κ_a^b` and the dilations `ψ ↦ (det S)^{(n+1)/2} ψ(S k Sᵀ)`.

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::poly::{adjugate_entry, packed, sym_index, Poly};
use super::FiducialND;
use crate::error::{Error, Result};
use crate::matrix::{cholesky, mat_exp, SpdMatrix, SymMatrixR};
use crate::measures::Wishart;
use crate::par::{integrate, Estimate, McConfig};

#[derive(Debug, Clone, PartialEq)]
pub struct ConeTestFunction {
    n: usize,
    c: DMatrix<f64>,
    terms: Vec<(f64, Poly)>,
}

fn cz(re: f64) -> Complex64 {
    Complex64::new(re, 0.0)
}

impl ConeTestFunction {
    /// `coef · (det k)^q · e^{-tr(Ck)}`.
    pub fn new(c: &SpdMatrix, q: f64, coef: Complex64) -> Self {
        let n = c.n();
        let vars = n * (n + 1) / 2;
        Self { n, c: c.as_matrix().clone(), terms: vec![(q, Poly::constant(vars, coef))] }
    }

    /// The fiducial vector `C_n (det k)^α e^{-β tr k}`.
    pub fn fiducial(fid: &FiducialND) -> Self {
        let c = SpdMatrix::identity(fid.n).to_sym().scaled(fid.beta);
        Self::new(&SpdMatrix::new(c).expect("βI is positive definite"), fid.alpha, cz(fid.cn()))
    }

    /// Multiplies every term by `poly`.
    pub fn times_poly(&self, poly: &Poly) -> Self {
        let terms = self.terms.iter().map(|(q, p)| (*q, p.mul(poly))).collect();
        Self { terms, ..self.clone() }.normalized()
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn vars(&self) -> usize {
        self.n * (self.n + 1) / 2
    }

    pub fn exponent_matrix(&self) -> &DMatrix<f64> {
        &self.c
    }

    pub fn terms(&self) -> &[(f64, Poly)] {
        &self.terms
    }

    /// Largest determinant power present.
    pub fn max_det_power(&self) -> f64 {
        self.terms.iter().map(|t| t.0).fold(f64::NEG_INFINITY, f64::max)
    }

    /// Merges terms with equal determinant power and drops empty polynomials.
    fn normalized(mut self) -> Self {
        self.terms.sort_by(|a, b| a.0.total_cmp(&b.0));
        let mut out: Vec<(f64, Poly)> = Vec::with_capacity(self.terms.len());
        for (q, p) in self.terms {
            match out.last_mut() {
                Some((lq, lp)) if lq.to_bits() == q.to_bits() => *lp = lp.add(&p),
                _ => out.push((q, p)),
            }
        }
        out.retain(|(_, p)| !p.is_zero());
        self.terms = out;
        self
    }

    pub fn eval(&self, k: &DMatrix<f64>) -> Result<Complex64> {
        let l = cholesky(k).map_err(|_| Error::ConeExit)?;
        let ln_det = 2.0 * l.diagonal().iter().map(|d| d.ln()).sum::<f64>();
        let x = packed(k);
        let tr = (&self.c * k).trace();
        Ok(self.terms.iter().map(|(q, p)| p.eval(&x) * (q * ln_det - tr).exp()).sum())
    }

    fn same_family(&self, other: &Self) -> Result<()> {
        if self.n != other.n || self.c != other.c {
            return Err(Error::Domain("test functions have different exponent matrices".into()));
        }
        Ok(())
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.same_family(other)?;
        let mut terms = self.terms.clone();
        terms.extend(other.terms.iter().cloned());
        Ok(Self { terms, ..self.clone() }.normalized())
    }

    pub fn scale(&self, c: Complex64) -> Self {
        let terms = self.terms.iter().map(|(q, p)| (*q, p.scale(c))).collect();
        Self { terms, ..self.clone() }.normalized()
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.add(&other.scale(cz(-1.0)))
    }

    /// `σ_ab f = k_(ab) f`.
    pub fn sigma(&self, a: usize, b: usize) -> Self {
        self.times_poly(&Poly::var(self.vars(), sym_index(self.n, a, b)))
    }

    /// `∂^{(ab)} f` with `∂^{(ab)} det k = adj(k)_ab` and `∂^{(ab)} tr(Ck) = C_ab`.
    pub fn partial(&self, a: usize, b: usize) -> Self {
        let vars = self.vars();
        let idx = sym_index(self.n, a, b);
        let half = if a == b { 1.0 } else { 0.5 };
        let adj = adjugate_entry(self.n, a, b);
        let mut terms = Vec::with_capacity(3 * self.terms.len());
        for (q, p) in &self.terms {
            terms.push((*q, p.derivative(idx).scale(cz(half))));
            terms.push((*q, p.scale(cz(-self.c[(a, b)]))));
            if *q != 0.0 {
                terms.push((q - 1.0, p.mul(&adj).scale(cz(*q))));
            }
        }
        let _ = vars;
        Self { terms, ..self.clone() }.normalized()
    }

    /// `κ_a^b f = -i[k_(ap) ∂^{(bp)} f + (n+1)/4 δ_a^b f]`.
    pub fn kappa(&self, a: usize, b: usize) -> Self {
        let n = self.n;
        let mut acc = if a == b {
            self.scale(cz((n as f64 + 1.0) / 4.0))
        } else {
            Self { terms: vec![], ..self.clone() }
        };
        for p in 0..n {
            let term = self.partial(b, p).times_poly(&Poly::var(self.vars(), sym_index(n, a, p)));
            acc = acc.add(&term).expect("same family");
        }
        acc.scale(Complex64::new(0.0, -1.0))
    }

    /// `(det S)^{(n+1)/2} f(S k Sᵀ)` for general `S` with `det S > 0`.
    pub fn dilate_by(&self, s: &DMatrix<f64>) -> Result<Self> {
        let n = self.n;
        let det_s = s.determinant();
        if !(det_s > 0.0) {
            return Err(Error::NotGlPlus { det: det_s });
        }
        let vars = self.vars();
        // x_ab(S k Sᵀ) as linear forms in x
        let mut subs = vec![Poly::zero(vars); vars];
        for a in 0..n {
            for b in a..n {
                let mut coeffs = vec![0.0; vars];
                for i in 0..n {
                    for j in 0..n {
                        coeffs[sym_index(n, i, j)] += s[(a, i)] * s[(b, j)];
                    }
                }
                subs[sym_index(n, a, b)] = Poly::linear(&coeffs);
            }
        }
        let half = (n as f64 + 1.0) / 2.0;
        let terms = self
            .terms
            .iter()
            .map(|(q, p)| (*q, p.substitute(&subs).scale(cz(det_s.powf(2.0 * q + half)))))
            .collect();
        let c = SymMatrixR::mirror_upper(&(s.transpose() * &self.c * s)).into_matrix();
        Ok(Self { n, c, terms }.normalized())
    }

    /// The dilation `e^{-iB_q^p κ_p^q}` with `S = exp(−B/2)`.
    pub fn dilate(&self, b: &DMatrix<f64>) -> Result<Self> {
        self.dilate_by(&mat_exp(&(-0.5 * b)))
    }
}

pub fn apply_sigma_nd(f: &ConeTestFunction, a: usize, b: usize) -> ConeTestFunction {
    f.sigma(a, b)
}

pub fn apply_kappa_nd(f: &ConeTestFunction, a: usize, b: usize) -> ConeTestFunction {
    f.kappa(a, b)
}

pub fn dilation_action(f: &ConeTestFunction, b: &DMatrix<f64>) -> Result<ConeTestFunction> {
    f.dilate(b)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Commutator {
    KappaKappa,
    SigmaKappa,
    SigmaSigma,
}

/// `max_k |([A,B] − RHS) f (k)| / max_k(|ABf|, |BAf|)` over `points` for:
/// `[κ_a^b, κ_j^k] = (i/2)(δ_a^k κ_j^b − δ_j^b κ_a^k)`,
/// `[σ_jk, κ_a^b] = (i/2)(δ_j^b σ_ak + δ_k^b σ_aj)`, `[σ_ab, σ_jk] = 0`.
/// Index tuples are `(a, b, j, k)` for κκ and σσ and `(j, k, a, b)` for σκ.
pub fn commutator_residual(
    f: &ConeTestFunction,
    which: Commutator,
    idx: [usize; 4],
    points: &[DMatrix<f64>],
) -> Result<f64> {
    let i_half = Complex64::new(0.0, 0.5);
    let delta = |x: usize, y: usize| if x == y { 1.0 } else { 0.0 };
    let empty = f.scale(cz(0.0));
    let (ab, ba, rhs) = match which {
        Commutator::KappaKappa => {
            let [a, b, j, k] = idx;
            let rhs = f
                .kappa(j, b)
                .scale(cz(delta(a, k)))
                .sub(&f.kappa(a, k).scale(cz(delta(j, b))))?
                .scale(i_half);
            (f.kappa(j, k).kappa(a, b), f.kappa(a, b).kappa(j, k), rhs)
        }
        Commutator::SigmaKappa => {
            let [j, k, a, b] = idx;
            let rhs = f
                .sigma(a, k)
                .scale(cz(delta(j, b)))
                .add(&f.sigma(a, j).scale(cz(delta(k, b))))?
                .scale(i_half);
            (f.kappa(a, b).sigma(j, k), f.sigma(j, k).kappa(a, b), rhs)
        }
        Commutator::SigmaSigma => {
            let [a, b, j, k] = idx;
            (f.sigma(j, k).sigma(a, b), f.sigma(a, b).sigma(j, k), empty)
        }
    };
    let diff = ab.sub(&ba)?.sub(&rhs)?;
    let mut num = 0.0f64;
    let mut den = f64::MIN_POSITIVE;
    for k in points {
        num = num.max(diff.eval(k)?.norm());
        den = den.max(ab.eval(k)?.norm()).max(ba.eval(k)?.norm());
    }
    Ok(num / den)
}

/// Largest commutator residual over every index combination of one kind.
pub fn max_commutator_residual(f: &ConeTestFunction, which: Commutator, points: &[DMatrix<f64>]) -> Result<f64> {
    let n = f.n();
    let mut worst = 0.0f64;
    for a in 0..n {
        for b in 0..n {
            for j in 0..n {
                for k in 0..n {
                    worst = worst.max(commutator_residual(f, which, [a, b, j, k], points)?);
                }
            }
        }
    }
    Ok(worst)
}

/// Finite form of `e^{iBκ} σ_jk e^{-iBκ} = (S⁻¹σS⁻ᵀ)_jk`: compares `σ_jk U f` with
/// `U (S⁻¹σS⁻ᵀ)_jk f` at `points`, relative to the largest value.
pub fn sigma_conjugation_residual(
    f: &ConeTestFunction,
    b: &DMatrix<f64>,
    points: &[DMatrix<f64>],
) -> Result<f64> {
    let n = f.n();
    let s = mat_exp(&(-0.5 * b));
    let si = s.clone().try_inverse().ok_or_else(|| Error::IllConditioned("exp(−B/2) is singular".into()))?;
    let uf = f.dilate_by(&s)?;
    let mut num = 0.0f64;
    let mut den = f64::MIN_POSITIVE;
    for j in 0..n {
        for k in 0..n {
            let lhs = uf.sigma(j, k);
            let mut mixed = f.scale(cz(0.0));
            for p in 0..n {
                for q in 0..n {
                    mixed = mixed.add(&f.sigma(p, q).scale(cz(si[(j, p)] * si[(k, q)])))?;
                }
            }
            let rhs = mixed.dilate_by(&s)?;
            for pt in points {
                let (l, r) = (lhs.eval(pt)?, rhs.eval(pt)?);
                num = num.max((l - r).norm());
                den = den.max(l.norm());
            }
        }
    }
    Ok(num / den)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UnitarityCheck {
    pub norm_sq: Estimate,
    pub diff: Estimate,
    /// `(‖Uf‖² − ‖f‖²)/‖f‖²`.
    pub discrepancy: f64,
    pub stderr: f64,
}

/// Wishart law matched to `|f|²`'s leading determinant power and exponent.
fn matched_wishart(f: &ConeTestFunction) -> Result<Wishart> {
    let n = f.n() as f64;
    let nu = (4.0 * f.max_det_power() + n + 1.0).max(n);
    let sigma = SpdMatrix::from_matrix(&(4.0 * f.exponent_matrix()))?.inverse();
    Wishart::new(nu, &sigma)
}

/// Monte Carlo `‖Uf‖² − ‖f‖²` over `∏_{a≤b} dk_ab` for `U = e^{-iBκ}`, sampling an even
/// mixture of Wishart laws matched to `|f|²` and `|Uf|²`.
pub fn unitarity_check(f: &ConeTestFunction, b: &DMatrix<f64>, mc: &McConfig) -> Result<UnitarityCheck> {
    let uf = f.dilate(b)?;
    let w1 = matched_wishart(f)?;
    let w2 = matched_wishart(&uf)?;
    let [norm_sq, diff] = integrate(mc, |rng: &mut ChaCha8Rng| {
        let x = if rand::Rng::random::<bool>(rng) { w1.sample(rng) } else { w2.sample(rng) };
        let k = x.as_matrix();
        let ln_q = crate::affine1d::ln_mean_exp(w1.ln_density(k), w2.ln_density(k));
        let (a, b) = match (f.eval(k), uf.eval(k)) {
            (Ok(a), Ok(b)) => (a.norm_sqr(), b.norm_sqr()),
            _ => (0.0, 0.0),
        };
        let q = ln_q.exp();
        [cz(a / q), cz((b - a) / q)]
    });
    let base = norm_sq.mean.re;
    Ok(UnitarityCheck { norm_sq, diff, discrepancy: diff.mean.re / base, stderr: diff.stderr / base })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::affine1d::{self, Fiducial1D, LogGrid, Stencil};
    use crate::matrix::{sample_spd, sample_sym};
    use std::sync::Arc;

    fn points(n: usize, count: usize, seed: u64) -> Vec<DMatrix<f64>> {
        (0..count).map(|i| sample_spd(n, seed + i as u64, 1.0).as_matrix().clone()).collect()
    }

    /// Fiducial plus a polynomial perturbation with a non-diagonal exponent.
    fn rich(n: usize, seed: u64) -> ConeTestFunction {
        let c = sample_spd(n, seed, 1.0);
        let base = ConeTestFunction::new(&c, 0.75, Complex64::new(1.0, 0.5));
        let vars = n * (n + 1) / 2;
        let lin: Vec<f64> = (0..vars).map(|v| 0.3 * (v as f64 + 1.0).sin()).collect();
        let poly = Poly::constant(vars, cz(1.0)).add(&Poly::linear(&lin).pow(2));
        base.times_poly(&poly).add(&ConeTestFunction::new(&c, 1.25, cz(0.4))).unwrap()
    }

    #[test]
    fn sigma_multiplies() {
        let c = SpdMatrix::identity(2);
        let f = ConeTestFunction::new(&c, 0.0, cz(2.0));
        let k = sample_spd(2, 1, 1.0);
        let v = f.sigma(0, 0).eval(k.as_matrix()).unwrap();
        let expected = k.as_matrix()[(0, 0)] * f.eval(k.as_matrix()).unwrap();
        assert!((v - expected).norm() < 1e-15);
    }

    #[test]
    fn kappa_on_fiducial_stays_in_family() {
        let fid = FiducialND::new(2, 1.0, 1.0).unwrap();
        let f = ConeTestFunction::fiducial(&fid);
        let g = f.kappa(0, 0);
        assert!(g.terms().iter().any(|(q, _)| *q == fid.alpha - 1.0));
        // κ_a^b η = -i[(α + (n+1)/4)δ_ab − β k_ab] η
        for k in points(2, 5, 3) {
            for (a, b) in [(0, 0), (0, 1), (1, 1)] {
                let d = if a == b { fid.alpha + 0.75 } else { 0.0 };
                let expected = Complex64::new(0.0, -(d - fid.beta * k[(a, b)])) * f.eval(&k).unwrap();
                assert!((f.kappa(a, b).eval(&k).unwrap() - expected).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn one_dimensional_reduction_matches_grid() {
        let fid1 = Fiducial1D::new(0.8, 1.2).unwrap();
        let fid = FiducialND::new(1, 0.8, 1.2).unwrap();
        let f = ConeTestFunction::fiducial(&fid);
        let grid = Arc::new(LogGrid::for_fiducial(&fid1, 1.0, 1.0, 1024, Stencil::Spectral).unwrap());
        let s = affine1d::coherent_wavefunction(&fid1, &affine1d::Label1D::identity(), &grid);
        let ks = affine1d::apply_kappa_grid(&s).unwrap();
        let ss = affine1d::apply_sigma_grid(&s).unwrap();
        let (kap, sig) = (f.kappa(0, 0), f.sigma(0, 0));
        for (j, &k) in grid.k().iter().enumerate() {
            if !(0.05..8.0).contains(&k) {
                continue;
            }
            let km = DMatrix::from_element(1, 1, k);
            assert!((kap.eval(&km).unwrap() - ks.values()[j]).norm() < 1e-8);
            assert!((sig.eval(&km).unwrap() - ss.values()[j]).norm() < 1e-12);
        }
    }

    #[test]
    fn commutators_vanish() {
        for n in [1, 2] {
            let f = rich(n, 7);
            let pts = points(n, 6, 100);
            for which in [Commutator::KappaKappa, Commutator::SigmaKappa, Commutator::SigmaSigma] {
                let r = max_commutator_residual(&f, which, &pts).unwrap();
                assert!(r < 1e-10, "{which:?} n={n} {r}");
            }
        }
        let f = rich(1, 3);
        assert_eq!(commutator_residual(&f, Commutator::SigmaSigma, [0; 4], &points(1, 3, 5)).unwrap(), 0.0);
    }

    #[test]
    fn wrong_commutator_is_detected() {
        // dropping the (n+1)/4 shift breaks [κ, κ] only through δ terms; flipping the sign
        // of the right-hand side must be seen
        let f = rich(2, 9);
        let pts = points(2, 4, 50);
        let r = commutator_residual(&f, Commutator::SigmaKappa, [0, 1, 0, 1], &pts).unwrap();
        let ab = f.kappa(0, 1).sigma(0, 1);
        let ba = f.sigma(0, 1).kappa(0, 1);
        let wrong = ab.sub(&ba).unwrap().add(&f.sigma(0, 0).scale(Complex64::new(0.0, 0.5))).unwrap();
        let v = wrong.eval(&pts[0]).unwrap().norm();
        assert!(r < 1e-10 && v > 1e-3);
    }

    #[test]
    fn dilation_identity_and_composition() {
        let f = rich(2, 11);
        let same = f.dilate(&DMatrix::zeros(2, 2)).unwrap();
        for k in points(2, 3, 9) {
            assert!((same.eval(&k).unwrap() - f.eval(&k).unwrap()).norm() < 1e-14);
        }
        // pointwise definition
        let b = sample_sym(2, 3, 0.4).into_matrix();
        let s = mat_exp(&(-0.5 * &b));
        let g = f.dilate(&b).unwrap();
        for k in points(2, 4, 20) {
            let direct = s.determinant().powf(1.5) * f.eval(&(&s * &k * s.transpose())).unwrap();
            assert!((g.eval(&k).unwrap() - direct).norm() < 1e-12 * (1.0 + direct.norm()));
        }
    }

    #[test]
    fn sigma_conjugation_law() {
        for n in [2, 3] {
            let f = rich(n, 21);
            let b = DMatrix::from_fn(n, n, |i, j| 0.2 * ((i * n + j) as f64).cos());
            let r = sigma_conjugation_residual(&f, &b, &points(n, 5, 30)).unwrap();
            assert!(r < 1e-10, "{r}");
        }
    }

    #[test]
    fn unitarity_examples() {
        let fid = FiducialND::new(2, 1.0, 1.0).unwrap();
        let f = ConeTestFunction::fiducial(&fid);
        let mc = McConfig::new(20_000, 8);
        let zero = unitarity_check(&f, &DMatrix::zeros(2, 2), &mc).unwrap();
        assert_eq!(zero.discrepancy, 0.0);
        let b = DMatrix::from_row_slice(2, 2, &[0.5, 0.3, -0.2, -0.4]);
        let u = unitarity_check(&f, &b, &mc).unwrap();
        assert!((u.norm_sq.mean.re - 1.0).abs() < 0.02);
        assert!(u.discrepancy.abs() < 0.01 && u.discrepancy.abs() < 4.0 * u.stderr + 1e-12, "{u:?}");
    }
}
