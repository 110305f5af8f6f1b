//! Time slicing: `M` inserted resolutions of unity evaluated by deterministic quadrature.

use std::f64::consts::FRAC_PI_2;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::lower::{chain, ChainSizes};
use super::{GridPropagator, HamiltonianSpec1D};
use crate::affine1d::{coherent_wavefunction, log_overlap_1d, mixed_symbol_1d, upper_symbol_1d, Fiducial1D, Label1D};
use crate::affinend::{log_overlap_nd, mixed_symbol_sigma_nd, overlap_nd, FiducialND, LabelG};
use crate::error::{Error, Result};
use crate::matrix::{cholesky, lower_triangular_inverse, SpdMatrix, SymMatrixR};
use crate::par::{map_indexed, Parallelism};
use crate::special::gauss_legendre_on;

/// Approximation of `⟨l′| e^{-iεH} |l⟩` for affine-linear `H = c·A`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ShortTimeKernel {
    /// `⟨l′|l⟩ e^{-iεc⟨l′|A|l⟩/⟨l′|l⟩}`.
    MixedSymbol,
    /// `⟨l′|l⟩ e^{-iεc⟨m|A|m⟩}` at the arithmetic midpoint `m` of the labels.
    MidpointUpper,
    /// Each insertion carries `e^{-iεc·a(x)}` with `a` the lower symbol of `A`, so the
    /// product is `⟨l_out|(N⁻¹∫dx e^{-iεc·a(x)}|x⟩⟨x|)^M|l_in⟩` with `ε = T/M`. The `F`
    /// integrals are done in closed form; see [`super::lower`].
    LowerSymbol,
}

/// Quadrature in `F` at fixed `G`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum FQuadrature {
    /// Whole line through `F = F_c + s(G) tan(πt/2)`, Gauss–Legendre in `t`.
    TanMapped { scale: f64 },
    /// Gauss–Legendre on the anchors' `F` range padded by `widths · s(G)`.
    Window { widths: f64 },
}

/// Nodes and weights for `N⁻¹ ∫ dF dG`, Gauss–Legendre in `u = ln G`.
#[derive(Debug, Clone)]
pub struct LabelQuadrature {
    pub nodes: Vec<Label1D>,
    pub weights: Vec<f64>,
}

/// Minimum nodes per axis.
pub const MIN_NODES: usize = 8;

impl LabelQuadrature {
    /// The `u` window extends `ln(1/tail_tol)/p` below and `ln(1/tail_tol)/(p−1)` above the
    /// anchors' range, matching the power tails of `∫dF |⟨l|F,G⟩|²` in `ln G`. The `F` scale
    /// at `G` is `s(G) = β(1/G + 1/G_min)`, the kernel width in `F`.
    pub fn build(
        fid: &Fiducial1D,
        anchors: &[Label1D],
        nodes_f: usize,
        nodes_g: usize,
        tail_tol: f64,
        fq: FQuadrature,
    ) -> Result<Self> {
        if nodes_f < MIN_NODES || nodes_g < MIN_NODES {
            return Err(Error::GridTooCoarse { found: nodes_f.min(nodes_g), min: MIN_NODES });
        }
        if anchors.is_empty() || !(tail_tol > 0.0 && tail_tol < 1.0) {
            return Err(Error::Domain("label quadrature needs anchors and 0 < tail_tol < 1".into()));
        }
        let p = fid.p();
        let lg: Vec<f64> = anchors.iter().map(|l| l.g.ln()).collect();
        let lo = lg.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = lg.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let tail = (1.0 / tail_tol).ln();
        let (us, wu) = gauss_legendre_on(nodes_g, lo - tail / p, hi + tail / (p - 1.0));
        let fmin = anchors.iter().map(|l| l.f).fold(f64::INFINITY, f64::min);
        let fmax = anchors.iter().map(|l| l.f).fold(f64::NEG_INFINITY, f64::max);
        let inv_gmin = (-lo).exp();
        let norm = fid.nconst();
        let mut nodes = Vec::with_capacity(nodes_f * nodes_g);
        let mut weights = Vec::with_capacity(nodes_f * nodes_g);
        for (&u, &wu) in us.iter().zip(&wu) {
            let g = u.exp();
            let s = fid.beta * (1.0 / g + inv_gmin);
            match fq {
                FQuadrature::TanMapped { scale } => {
                    let (ts, wt) = gauss_legendre_on(nodes_f, -1.0, 1.0);
                    let fc = 0.5 * (fmin + fmax);
                    for (&t, &wt) in ts.iter().zip(&wt) {
                        let x = FRAC_PI_2 * t;
                        let c = x.cos();
                        nodes.push(Label1D { f: fc + scale * s * x.tan(), g });
                        weights.push(wu * g * wt * scale * s * FRAC_PI_2 / (c * c) / norm);
                    }
                }
                FQuadrature::Window { widths } => {
                    let (fs, wf) = gauss_legendre_on(nodes_f, fmin - widths * s, fmax + widths * s);
                    for (&f, &wf) in fs.iter().zip(&wf) {
                        nodes.push(Label1D { f, g });
                        weights.push(wu * g * wf / norm);
                    }
                }
            }
        }
        Ok(Self { nodes, weights })
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SlicingConfig {
    /// Number `M` of inserted resolutions of unity. The slice width is `T/(M+1)` for the
    /// two-label kernels and `T/M` for [`ShortTimeKernel::LowerSymbol`].
    pub mslices: usize,
    /// Label nodes per axis for the two-label kernels.
    pub nodes_f: usize,
    pub nodes_g: usize,
    pub ttotal: f64,
    pub tail_tol: f64,
    pub f_quadrature: FQuadrature,
    pub kernel: ShortTimeKernel,
    /// `k` grid points (σ) or Mellin nodes (κ) for the lower-symbol chain.
    pub spectral_points: usize,
    /// Nodes of the reduced `G` integral in the lower-symbol chain.
    pub scale_nodes: usize,
    /// Cap on [`SlicingConfig::work`].
    pub budget_cap: u128,
}

impl Default for SlicingConfig {
    fn default() -> Self {
        Self {
            mslices: 1,
            nodes_f: 48,
            nodes_g: 40,
            ttotal: 0.5,
            tail_tol: 1e-10,
            f_quadrature: FQuadrature::Window { widths: 6.0 },
            kernel: ShortTimeKernel::LowerSymbol,
            spectral_points: 4096,
            scale_nodes: 4000,
            budget_cap: 100_000_000_000,
        }
    }
}

impl SlicingConfig {
    pub fn node_count(&self) -> usize {
        self.nodes_f * self.nodes_g
    }

    /// Kernel evaluations plus multiply-adds: `M · nodes²` for the two-label kernels,
    /// `spectral · (scale + M)` for the lower-symbol chain.
    pub fn work(&self) -> u128 {
        let m = self.mslices.max(1) as u128;
        match self.kernel {
            ShortTimeKernel::LowerSymbol => self.spectral_points as u128 * (self.scale_nodes as u128 + m),
            _ => {
                let n = self.node_count() as u128;
                m * n * n
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SlicedResult {
    pub value: Complex64,
    pub nodes: usize,
    pub work: u128,
    pub slice_width: f64,
}

/// Logarithm of the short-time kernel.
fn ln_short_time(
    fid: &Fiducial1D,
    c: f64,
    which: crate::affine1d::Generator1D,
    kernel: ShortTimeKernel,
    eps: f64,
    bra: &Label1D,
    ket: &Label1D,
) -> Complex64 {
    let sym = match kernel {
        ShortTimeKernel::MixedSymbol => mixed_symbol_1d(fid, which, bra, ket),
        ShortTimeKernel::LowerSymbol => return log_overlap_1d(fid, bra, ket),
        ShortTimeKernel::MidpointUpper => {
            let mid = Label1D { f: 0.5 * (bra.f + ket.f), g: 0.5 * (bra.g + ket.g) };
            Complex64::new(upper_symbol_1d(fid, which, &mid), 0.0)
        }
    };
    log_overlap_1d(fid, bra, ket) - Complex64::i() * (eps * c) * sym
}

/// `⟨l_out|e^{-iεH}|x_M⟩ ∏ N⁻¹dx_m ⟨x_m|e^{-iεH}|x_{m−1}⟩ ⋯ ⟨x_1|e^{-iεH}|l_in⟩` with
/// `ε = T/(M+1)`, swept as a transfer matrix over the shared label quadrature.
pub fn time_sliced_propagator(
    fid: &Fiducial1D,
    h: &HamiltonianSpec1D,
    cfg: &SlicingConfig,
    l_out: &Label1D,
    l_in: &Label1D,
) -> Result<SlicedResult> {
    let (c, which) = h
        .linear()
        .ok_or_else(|| Error::UnsupportedHamiltonian("time slicing needs the symbol of an affine-linear H".into()))?;
    let m = cfg.mslices;
    if m == 0 {
        let eps = cfg.ttotal;
        let kernel = if cfg.kernel == ShortTimeKernel::LowerSymbol { ShortTimeKernel::MixedSymbol } else { cfg.kernel };
        let value = ln_short_time(fid, c, which, kernel, eps, l_out, l_in).exp();
        return Ok(SlicedResult { value, nodes: 0, work: 0, slice_width: eps });
    }
    if cfg.kernel == ShortTimeKernel::LowerSymbol {
        let sizes = ChainSizes { spectral: cfg.spectral_points, scale: cfg.scale_nodes, tail_tol: cfg.tail_tol };
        if cfg.work() > cfg.budget_cap {
            return Err(Error::BudgetExceeded { needed: cfg.work(), cap: cfg.budget_cap });
        }
        return chain(fid, c, which, cfg.ttotal, m, sizes, l_out, l_in);
    }
    let eps = cfg.ttotal / (m as f64 + 1.0);
    let lk = |bra: &Label1D, ket: &Label1D| ln_short_time(fid, c, which, cfg.kernel, eps, bra, ket);
    let work = cfg.work();
    if work > cfg.budget_cap {
        return Err(Error::BudgetExceeded { needed: work, cap: cfg.budget_cap });
    }
    let quad = LabelQuadrature::build(fid, &[*l_in, *l_out], cfg.nodes_f, cfg.nodes_g, cfg.tail_tol, cfg.f_quadrature)?;
    let n = quad.len();
    let x = &quad.nodes;
    let lw: Vec<f64> = quad.weights.iter().map(|w| w.ln()).collect();
    // weights ride inside the exponent so tiny weights never meet large kernels as inf·0
    let mut v = DVector::from_iterator(n, x.iter().zip(&lw).map(|(xi, wi)| (lk(xi, l_in) + wi).exp()));
    if m > 1 {
        let rows = map_indexed(n, Parallelism::Auto, |i| {
            (0..n).map(|j| (lk(&x[i], &x[j]) + lw[i]).exp()).collect::<Vec<_>>()
        });
        let kmat = DMatrix::from_fn(n, n, |i, j| rows[i][j]);
        for _ in 1..m {
            v = &kmat * v;
        }
    }
    let value = x.iter().zip(v.iter()).map(|(xi, vi)| lk(l_out, xi).exp() * vi).sum();
    Ok(SlicedResult { value, nodes: n, work, slice_width: eps })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SemigroupCheck {
    pub direct: Complex64,
    pub composed: Complex64,
}

impl SemigroupCheck {
    pub fn error(&self) -> f64 {
        (self.direct - self.composed).norm()
    }
}

/// `J_{T₁+T₂}` against `N⁻¹∫dx J_{T₂}(l_out, x) J_{T₁}(x, l_in)` on the grid oracle.
pub fn semigroup_check(
    prop: &GridPropagator,
    t1: f64,
    t2: f64,
    l_out: &Label1D,
    l_in: &Label1D,
    quad: &LabelQuadrature,
) -> Result<SemigroupCheck> {
    let fid = prop.fid;
    let grid = prop.grid();
    let forward = prop.evolve(&coherent_wavefunction(&fid, l_in, grid), t1)?;
    let backward = prop.evolve(&coherent_wavefunction(&fid, l_out, grid), -t2)?;
    let mut composed = Complex64::new(0.0, 0.0);
    for (x, w) in quad.nodes.iter().zip(&quad.weights) {
        let psi = coherent_wavefunction(&fid, x, grid);
        composed += backward.inner(&psi)? * psi.inner(&forward)? * *w;
    }
    Ok(SemigroupCheck { direct: prop.amplitude(t1 + t2, l_out, l_in)?, composed })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NdSmokeConfig {
    /// Gauss–Legendre nodes per `F` entry.
    pub nodes_f: usize,
    /// Gauss–Legendre nodes per Cholesky coordinate of `G`.
    pub nodes_g: usize,
    /// Half-width of the log-diagonal and off-diagonal Cholesky windows.
    pub g_span: f64,
    pub f_scale: f64,
    pub budget_cap: u128,
}

impl Default for NdSmokeConfig {
    fn default() -> Self {
        Self { nodes_f: 8, nodes_g: 8, g_span: 2.5, f_scale: 1.0, budget_cap: 100_000_000 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NdSmoke {
    pub value: Complex64,
    /// `⟨l_out|F_in − cTΣ, G_in⟩`.
    pub exact: Complex64,
    pub nodes: usize,
}

impl NdSmoke {
    pub fn error(&self) -> f64 {
        (self.value - self.exact).norm()
    }
}

/// One inserted resolution of unity for `H = c tr(Σσ)` on the `n = 2` cone, by tensor
/// quadrature. `G = R T Tᵀ Rᵀ` about `R = chol(G_in)` with `T` lower triangular,
/// `T_ii = e^{a_i}`, and `F = F_c + β R⁻ᵀ Φ R⁻¹` with `Φ_ab = s tan(πt_ab/2)`.
pub fn time_sliced_nd_smoke(
    fid: &FiducialND,
    c: f64,
    sigma: &SymMatrixR,
    t: f64,
    l_out: &LabelG,
    l_in: &LabelG,
    cfg: &NdSmokeConfig,
) -> Result<NdSmoke> {
    if fid.n != 2 {
        return Err(Error::Domain(format!("the sliced smoke test is two-dimensional, got n={}", fid.n)));
    }
    let moved = LabelG { f: l_in.f.sub(&sigma.scaled(c * t)), g: l_in.g.clone() };
    let exact = overlap_nd(fid, l_out, &moved)?;
    if t == 0.0 {
        return Ok(NdSmoke { value: overlap_nd(fid, l_out, l_in)?, exact, nodes: 0 });
    }
    let (mf, mg) = (cfg.nodes_f, cfg.nodes_g);
    let total = (mf as u128).pow(3) * (mg as u128).pow(3);
    if total > cfg.budget_cap {
        return Err(Error::BudgetExceeded { needed: total, cap: cfg.budget_cap });
    }
    let eps = t / 2.0;
    let kern = |bra: &LabelG, ket: &LabelG| -> Result<Complex64> {
        let h = mixed_symbol_sigma_nd(fid, sigma, bra, ket)?;
        Ok((log_overlap_nd(fid, bra, ket)? - Complex64::i() * (eps * c) * h).exp())
    };
    let r = cholesky(l_in.g.as_matrix())?;
    let ri = lower_triangular_inverse(&r);
    let fc = l_in.f.add(&l_out.f).scaled(0.5);
    let (ga, gw) = gauss_legendre_on(mg, -cfg.g_span, cfg.g_span);
    let (ts, tw) = gauss_legendre_on(mf, -1.0, 1.0);
    let beta = fid.beta;
    let s = cfg.f_scale;
    // dF dG: det R cancels between the two congruences
    let jac_f = beta.powi(3);
    let norm = fid.nconst_resolution();
    let g_nodes: Vec<(SpdMatrix, f64)> = {
        let mut v = Vec::with_capacity(mg * mg * mg);
        for (i1, &a1) in ga.iter().enumerate() {
            for (i2, &a2) in ga.iter().enumerate() {
                for (i3, &b) in ga.iter().enumerate() {
                    let tm = DMatrix::from_row_slice(2, 2, &[a1.exp(), 0.0, b, a2.exp()]);
                    let g = &r * &tm * tm.transpose() * r.transpose();
                    let g = SpdMatrix::from_matrix(&SymMatrixR::mirror_upper(&g).into_matrix())?;
                    // d(TTᵀ) = 2² T₁₁³ T₂₂² da₁ da₂ db
                    let jac = 4.0 * (3.0 * a1 + 2.0 * a2).exp();
                    v.push((g, gw[i1] * gw[i2] * gw[i3] * jac));
                }
            }
        }
        v
    };
    let f_nodes: Vec<(SymMatrixR, f64)> = {
        let mut v = Vec::with_capacity(mf * mf * mf);
        let tan = |t: f64| (s * (FRAC_PI_2 * t).tan(), s * FRAC_PI_2 / (FRAC_PI_2 * t).cos().powi(2));
        for (j1, &t1) in ts.iter().enumerate() {
            for (j2, &t2) in ts.iter().enumerate() {
                for (j3, &t3) in ts.iter().enumerate() {
                    let (p11, d11) = tan(t1);
                    let (p12, d12) = tan(t2);
                    let (p22, d22) = tan(t3);
                    let phi = DMatrix::from_row_slice(2, 2, &[p11, p12, p12, p22]);
                    let f = fc.add(&SymMatrixR::mirror_upper(&(beta * ri.transpose() * phi * &ri)));
                    v.push((f, tw[j1] * tw[j2] * tw[j3] * d11 * d12 * d22 * jac_f));
                }
            }
        }
        v
    };
    let partial = map_indexed(g_nodes.len(), Parallelism::Auto, |i| {
        let (g, wg) = &g_nodes[i];
        let mut acc = Complex64::new(0.0, 0.0);
        for (f, wf) in &f_nodes {
            let x = LabelG { f: f.clone(), g: g.clone() };
            if let (Ok(a), Ok(b)) = (kern(l_out, &x), kern(&x, l_in)) {
                acc += a * b * (wg * wf);
            }
        }
        acc
    });
    let value = partial.iter().sum::<Complex64>() / norm;
    Ok(NdSmoke { value, exact, nodes: g_nodes.len() * f_nodes.len() })
}
