//! Lower-symbol time slicing with the `F` integral of every inserted resolution done in
//! closed form.
//!
//! With `a(F, G)` the lower symbol of the generator, each slice is the operator
//! `U = N⁻¹∫dF dG e^{-iεc·a(F,G)} |F,G⟩⟨F,G|`. Since `⟨k|F,G⟩ = e^{iFk} G^{-1/2} η(k/G)`,
//! the `F` integral is a delta function, and what is left is a one-dimensional integral
//! over `x = k/G`:
//!
//! * σ (`a = γ_h G`): `U` multiplies by `u(k) = (2π/N)∫dx/x η(x)² e^{-iφk/x}`, `φ = εcγ_h`;
//! * κ (`a = γ_h F G`): `U` commutes with dilations and acts on the Mellin transform
//!   `Ψ(λ) = ∫dk k^{-1/2-iλ} ψ(k)` as the multiplier
//!   `m(λ) = (2π/N)∫dx/x η(x) η(x−φ) s^{-1/2+iλ}` with `s = (x−φ)/x`.

use std::f64::consts::PI;

use num_complex::Complex64;

use super::SlicedResult;
use crate::affine1d::grid::gamma_window;
use crate::affine1d::{coherent_wavefunction, Fiducial1D, Generator1D, Label1D, LogGrid, Stencil};
use crate::error::{Error, Result};
use crate::par::{map_indexed, Parallelism};
use crate::special::ln_gamma_complex;

/// `γ_h = (α − ½)/β`, the coefficient of the lower symbols `γ_h G` (σ) and `γ_h F G` (κ).
pub fn gamma_lower(fid: &Fiducial1D) -> f64 {
    (fid.alpha - 0.5) / fid.beta
}

/// Lower symbol of a generator at a label.
pub fn lower_symbol_1d(fid: &Fiducial1D, which: Generator1D, label: &Label1D) -> f64 {
    match which {
        Generator1D::Sigma => gamma_lower(fid) * label.g,
        Generator1D::Kappa => gamma_lower(fid) * label.g * label.f,
    }
}

/// Quadrature sizes for the reduced integrals.
#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct ChainSizes {
    /// `k` grid points (σ) or Mellin nodes (κ).
    pub spectral: usize,
    /// Trapezoid nodes in `ln x`.
    pub scale: usize,
    pub tail_tol: f64,
}

/// Trapezoid nodes `(x, weight)` in `ln(x − x0)` for `∫_{x0}^∞ dx`.
fn scale_nodes(fid: &Fiducial1D, x0: f64, reach: f64, nodes: usize) -> Vec<(f64, f64)> {
    let (lo, hi) = gamma_window(2.0 * fid.alpha, 2.0 * fid.beta, 1e-17);
    let (u0, u1) = ((1e-3 * lo).ln(), (hi + reach).ln());
    let h = (u1 - u0) / (nodes - 1) as f64;
    (0..nodes)
        .map(|j| {
            let t = (u0 + j as f64 * h).exp();
            (x0 + t, h * t)
        })
        .collect()
}

/// `⟨l_out| U^M |l_in⟩` for `H = cσ`.
pub(crate) fn chain_sigma(
    fid: &Fiducial1D,
    c: f64,
    eps: f64,
    m: usize,
    sizes: ChainSizes,
    l_out: &Label1D,
    l_in: &Label1D,
) -> Result<Complex64> {
    let phi = eps * c * gamma_lower(fid);
    let grid = std::sync::Arc::new(LogGrid::for_labels(fid, &[*l_out, *l_in], sizes.spectral, Stencil::Central)?);
    let xs = scale_nodes(fid, 0.0, 0.0, sizes.scale);
    let h = ((xs[1].0) / xs[0].0).ln();
    // (2π/N) C² x^{2α} e^{-2βx} per unit ln x, normalized so that u ≡ 1 at φ = 0
    let dens: Vec<f64> = xs.iter().map(|&(x, w)| w / x * fid.eval_unchecked(x).powi(2)).collect();
    let total: f64 = dens.iter().sum();
    let u = map_indexed(grid.len(), Parallelism::Auto, |i| {
        let k = grid.k()[i];
        // nodes where the phase turns by more than a radian per step are past the
        // Riemann–Lebesgue cutoff and contribute only aliasing
        let sum: Complex64 = xs
            .iter()
            .zip(&dens)
            .filter(|((x, _), _)| (phi * k / x).abs() * h <= 1.0)
            .map(|((x, _), d)| Complex64::from_polar(*d, -phi * k / x))
            .sum();
        sum / total
    });
    let a = coherent_wavefunction(fid, l_out, &grid);
    let b = coherent_wavefunction(fid, l_in, &grid);
    let value = (0..grid.len())
        .map(|i| grid.weights()[i] * a.values()[i].conj() * u[i].powu(m as u32) * b.values()[i])
        .sum();
    Ok(value)
}

/// `ln Ψ(λ)` for the Mellin transform of a coherent state.
fn ln_mellin(fid: &Fiducial1D, l: &Label1D, lambda: f64) -> Complex64 {
    let a = Complex64::new(fid.alpha + 0.5, -lambda);
    let z = Complex64::new(fid.beta / l.g, -l.f);
    fid.ln_c1() - (fid.alpha + 0.5) * l.g.ln() + ln_gamma_complex(a) - a * z.ln()
}

/// `⟨l_out| U^M |l_in⟩` for `H = cκ`, by Plancherel in the Mellin variable.
pub(crate) fn chain_kappa(
    fid: &Fiducial1D,
    c: f64,
    eps: f64,
    m: usize,
    sizes: ChainSizes,
    l_out: &Label1D,
    l_in: &Label1D,
) -> Result<Complex64> {
    let phi = eps * c * gamma_lower(fid);
    let xs = scale_nodes(fid, phi.max(0.0), phi.abs(), sizes.scale);
    let pref = 2.0 * PI / fid.nconst();
    let kernel: Vec<(f64, f64)> = xs
        .iter()
        .map(|&(x, w)| {
            let s = (x - phi) / x;
            (pref * w / x * fid.eval_unchecked(x) * fid.eval_unchecked(x - phi) / s.sqrt(), s.ln())
        })
        .collect();
    let theta = Complex64::new(fid.beta / l_out.g, -l_out.f).arg() + Complex64::new(fid.beta / l_in.g, -l_in.f).arg();
    let a = fid.alpha + 0.5;
    let tail = (1.0 / sizes.tail_tol).ln();
    let reach = |rate: f64| (tail + 2.0 * a * (1.0 + tail).ln()) / rate;
    let (lmin, lmax) = (-reach(PI - theta), reach(PI + theta));
    let n = sizes.spectral;
    let dl = (lmax - lmin) / (n - 1) as f64;
    let terms = map_indexed(n, Parallelism::Auto, |j| {
        let lambda = lmin + j as f64 * dl;
        let mult: Complex64 = kernel.iter().map(|&(w, ls)| Complex64::from_polar(w, lambda * ls)).sum();
        let ln_p = ln_mellin(fid, l_out, lambda).conj() + ln_mellin(fid, l_in, lambda);
        let end = if j == 0 || j + 1 == n { 0.5 } else { 1.0 };
        end * ln_p.exp() * mult.powu(m as u32)
    });
    Ok(terms.into_iter().sum::<Complex64>() * dl / (2.0 * PI))
}

pub(crate) fn chain(
    fid: &Fiducial1D,
    c: f64,
    which: Generator1D,
    ttotal: f64,
    m: usize,
    sizes: ChainSizes,
    l_out: &Label1D,
    l_in: &Label1D,
) -> Result<SlicedResult> {
    if m == 0 {
        return Err(Error::Domain("lower-symbol slicing needs at least one insertion".into()));
    }
    if sizes.spectral < 16 || sizes.scale < 16 {
        return Err(Error::GridTooCoarse { found: sizes.spectral.min(sizes.scale), min: 16 });
    }
    let eps = ttotal / m as f64;
    let value = match which {
        Generator1D::Sigma => chain_sigma(fid, c, eps, m, sizes, l_out, l_in)?,
        Generator1D::Kappa => chain_kappa(fid, c, eps, m, sizes, l_out, l_in)?,
    };
    let work = (sizes.spectral as u128) * (sizes.scale as u128 + m as u128);
    Ok(SlicedResult { value, nodes: sizes.spectral, work, slice_width: eps })
}
