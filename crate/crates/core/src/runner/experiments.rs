//! The experiments behind each subcommand. Every experiment appends checks and reported
//! quantities to a [`Session`]; the numbers depend only on the configuration.

use std::f64::consts::PI;
use std::sync::Arc;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::config::{Experiment, ExperimentConfig};
use super::report::{Bound, Check, Quantity};
use crate::affine1d::{
    admissibility_1d, apply_kappa_grid, coherent_wavefunction, expansion_order_1d, local_expansion_1d,
    metric_asymmetry, moments_1d, operator_matrix, overlap_1d, polarization_order_1d, polarization_residual_1d,
    resolution_check_1d, Fiducial1D, Label1D, LogGrid, ResolutionCheck, Stencil,
};
use crate::affinend::poly::Poly;
use crate::affinend::{
    admissibility_nd, expansion_order_nd, kn, kn_quadrature, local_expansion_nd, max_commutator_residual, overlap_nd,
    polarization_order_nd, polarization_residual_nd, resolution_check_nd, sigma_conjugation_residual,
    unitarity_check, Commutator, ConeTestFunction, FiducialND, LabelG,
};
use crate::error::Result;
use crate::matrix::{sample_glplus_with, sample_spd, sample_sym_with, SpdMatrix, SymMatrixR};
use crate::measures::{jacobian_polar, jacobian_t_to_g, polar_decompose, pushforward_check};
use crate::par::McConfig;
use crate::propagator::{
    analytic_propagator, fit_lower_symbol, gamma_lower, lower_symbol_verify, time_sliced_nd_smoke,
    time_sliced_propagator, GridPropagator, HamiltonianSpec1D, LowerSymbolCandidate, NdSmokeConfig, SlicingConfig,
};

use Bound::{AtLeast, AtMost};

/// `(α, β)` pairs for the fiducial-family criteria.
const FIDUCIAL_FAMILY: [(f64, f64); 10] = [
    (0.5, 1.0),
    (1.0, 1.0),
    (1.0, 2.0),
    (0.7, 0.4),
    (1.5, 0.8),
    (2.0, 2.0),
    (2.5, 1.3),
    (3.0, 0.5),
    (0.9, 3.0),
    (4.0, 1.7),
];

/// Maximum distance, in standard errors, for Monte Carlo agreement.
const Z_MAX: f64 = 3.0;

fn cz(x: f64) -> Complex64 {
    Complex64::new(x, 0.0)
}

/// Half a unit in the third significant figure of `c`.
pub fn third_figure_tolerance(c: f64) -> f64 {
    0.5 * 10f64.powf(c.abs().log10().floor() - 2.0)
}

pub struct Session<'a> {
    cfg: &'a ExperimentConfig,
    current: Experiment,
    pub(super) checks: Vec<Check>,
    pub(super) quantities: Vec<Quantity>,
}

impl<'a> Session<'a> {
    pub fn new(cfg: &'a ExperimentConfig) -> Self {
        Self { cfg, current: cfg.experiment, checks: Vec::new(), quantities: Vec::new() }
    }

    fn check(&mut self, criterion: Option<u8>, name: impl Into<String>, metric: f64, bound: Bound, tol: f64) -> &mut Check {
        let name = name.into();
        let tolerance = self.cfg.tolerances.get(&name).copied().unwrap_or(tol);
        self.checks.push(Check {
            criterion,
            experiment: self.current,
            name,
            metric,
            bound,
            tolerance,
            passed: bound.holds(metric, tolerance),
            estimate: None,
            target: None,
            stderr: None,
        });
        self.checks.last_mut().expect("just pushed")
    }

    fn quantity(&mut self, name: impl Into<String>, value: f64, stderr: Option<f64>) {
        self.quantities.push(Quantity { experiment: self.current, name: name.into(), value, stderr });
    }

    fn seed(&self) -> u64 {
        self.cfg.seed.unwrap_or(0)
    }

    fn rng(&self, tag: u64) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(self.seed().wrapping_add(tag.wrapping_mul(0x9E37_79B9)))
    }

    fn mc(&self, tag: u64) -> McConfig {
        McConfig::new(self.cfg.samples(), self.seed().wrapping_add(tag.wrapping_mul(0x9E37_79B9)))
    }

    /// Relative standard-error bound: 1% at 10⁶ samples, scaled as `1/√samples` below that.
    fn stderr_tol(&self) -> f64 {
        0.01 * (1e6 / self.cfg.samples() as f64).sqrt().max(1.0)
    }

    fn dims(&self, default: &[usize]) -> Vec<usize> {
        self.cfg.n.map_or_else(|| default.to_vec(), |n| vec![n])
    }

    fn alpha(&self, default: f64) -> f64 {
        self.cfg.alpha.unwrap_or(default)
    }

    fn beta(&self, default: f64) -> f64 {
        self.cfg.beta.unwrap_or(default)
    }

    fn fid1(&self, alpha: f64, beta: f64) -> Result<Fiducial1D> {
        Fiducial1D::new(self.alpha(alpha), self.beta(beta))
    }

    pub fn run(&mut self, e: Experiment) -> Result<()> {
        self.current = e;
        match e {
            Experiment::Overlap => overlap(self),
            Experiment::CheckAlgebra => check_algebra(self),
            Experiment::Kn => kn_routes(self),
            Experiment::Resolution => resolution(self),
            Experiment::Jacobian => jacobian(self),
            Experiment::Polarization => polarization(self),
            Experiment::Geometry => geometry(self),
            Experiment::Propagate => propagate(self),
            Experiment::LowerSymbol => lower_symbol(self),
            Experiment::VerifyAll => {
                for sub in Experiment::SUITE {
                    self.run(sub)?;
                }
                Ok(())
            }
        }
    }
}

fn random_label_1d(rng: &mut ChaCha8Rng, f: f64, g: (f64, f64)) -> Result<Label1D> {
    Label1D::new(rng.random_range(-f..f), rng.random_range(g.0..g.1))
}

fn overlap(s: &mut Session) -> Result<()> {
    let mut rng = s.rng(1);
    for n in s.dims(&[1, 2, 3]) {
        let fid = FiducialND::new(n, s.alpha(1.1), s.beta(0.9))?;
        let mut worst = 0.0f64;
        for _ in 0..100 {
            let l = LabelG::random(&mut rng, n, 1.0);
            worst = worst.max((overlap_nd(&fid, &l, &l)? - 1.0).norm());
        }
        s.check(Some(1), format!("normalization-n{n}"), worst, AtMost, 1e-12);
    }

    let fid = s.fid1(1.0, 1.0)?;
    let mut worst = 0.0f64;
    for _ in 0..50 {
        let a = random_label_1d(&mut rng, 1.0, (0.5, 2.0))?;
        let b = random_label_1d(&mut rng, 1.0, (0.5, 2.0))?;
        let grid = Arc::new(LogGrid::for_labels(&fid, &[a, b], s.cfg.quadrature.grid_points, Stencil::Central)?);
        let ip = coherent_wavefunction(&fid, &a, &grid).inner(&coherent_wavefunction(&fid, &b, &grid))?;
        worst = worst.max((ip - overlap_1d(&fid, &a, &b)).norm());
    }
    s.check(Some(2), "closed-form-vs-grid", worst, AtMost, 1e-6);

    let half = Fiducial1D::new(0.5, 1.0)?;
    let z = overlap_1d(&half, &Label1D::new(0.0, 1.0)?, &Label1D::new(1.0, 1.0)?);
    let target = Complex64::new(0.48, 0.64);
    s.check(None, "overlap-example-1d", (z - target).norm(), AtMost, 1e-14).with_estimate(z).with_target(target);

    // α = 1/4 at n = 2 sits on the admissibility boundary; the overlap is still defined
    let fid = FiducialND { n: 2, alpha: 0.25, beta: 1.7 };
    let f = SymMatrixR::from_diagonal(&[2.0 * 1.7, 0.0]);
    let z = overlap_nd(&fid, &LabelG { f, g: SpdMatrix::identity(2) }, &LabelG::identity(2))?;
    let target = Complex64::new(0.0, -0.5);
    s.check(None, "overlap-example-n2", (z - target).norm(), AtMost, 1e-14).with_estimate(z).with_target(target);
    Ok(())
}

/// Fiducial-like profile with a polynomial factor and a non-diagonal exponent.
fn rich_test_function(n: usize, seed: u64) -> Result<ConeTestFunction> {
    let c = sample_spd(n, seed, 1.0);
    let base = ConeTestFunction::new(&c, 0.75, Complex64::new(1.0, 0.5));
    let vars = n * (n + 1) / 2;
    let lin: Vec<f64> = (0..vars).map(|v| 0.3 * (v as f64 + 1.0).sin()).collect();
    let poly = Poly::constant(vars, cz(1.0)).add(&Poly::linear(&lin).pow(2));
    base.times_poly(&poly).add(&ConeTestFunction::new(&c, 1.25, cz(0.4)))
}

fn check_algebra(s: &mut Session) -> Result<()> {
    let mut worst = 0.0f64;
    for (a, b) in FIDUCIAL_FAMILY {
        worst = worst.max(moments_1d(&Fiducial1D::new(a, b)?).uncertainty_gap().abs());
    }
    s.check(Some(4), "minimum-uncertainty", worst, AtMost, 1e-10);

    for n in s.dims(&[2, 3]) {
        let f = rich_test_function(n, s.seed().wrapping_add(7))?;
        let points: Vec<DMatrix<f64>> = (0..20)
            .map(|i| sample_spd(n, s.seed().wrapping_add(100 + i), 1.0).as_matrix().clone())
            .collect();
        let mut worst = 0.0f64;
        for which in [Commutator::KappaKappa, Commutator::SigmaKappa, Commutator::SigmaSigma] {
            worst = worst.max(max_commutator_residual(&f, which, &points)?);
        }
        s.check(Some(5), format!("commutators-n{n}"), worst, AtMost, 1e-8);
        let b = DMatrix::from_fn(n, n, |i, j| 0.2 * ((i * n + j) as f64).cos());
        let r = sigma_conjugation_residual(&f, &b, &points)?;
        s.check(None, format!("sigma-conjugation-n{n}"), r, AtMost, 1e-10);
    }

    let fid = Fiducial1D::new(1.0, 1.0)?;
    let grid = Arc::new(LogGrid::for_fiducial(&fid, 0.5, 2.0, 128, Stencil::Central)?);
    let kap = operator_matrix(&grid, apply_kappa_grid)?;
    s.check(None, "kappa-hermitian-grid", metric_asymmetry(&grid, &kap), AtMost, 1e-12);

    let fid = FiducialND::new(2, 1.0, 1.0)?;
    let b = DMatrix::from_row_slice(2, 2, &[0.5, 0.3, -0.2, -0.4]);
    let u = unitarity_check(&ConeTestFunction::fiducial(&fid), &b, &s.mc(3))?;
    s.check(None, "dilation-unitarity", u.discrepancy.abs() / u.stderr, AtMost, Z_MAX)
        .with_estimate(cz(u.discrepancy))
        .with_target(cz(0.0))
        .with_stderr(u.stderr);
    Ok(())
}

fn kn_routes(s: &mut Session) -> Result<()> {
    for n in s.dims(&[2, 3]) {
        let a = if n <= 2 { 0.5 } else { 1.0 };
        let k = kn(n, a, &s.mc(10 + n as u64))?;
        let closed = cz(k.closed);
        if n == 2 && a == 0.5 {
            s.check(Some(6), "kn-closed-n2", (k.closed - PI / 2.0).abs(), AtMost, 1e-12)
                .with_estimate(closed)
                .with_target(cz(PI / 2.0));
        }
        if n <= 2 {
            let q = kn_quadrature(n, a)?;
            s.check(Some(6), format!("kn-quadrature-n{n}"), (q / k.closed - 1.0).abs(), AtMost, 1e-9)
                .with_estimate(cz(q))
                .with_target(closed);
        }
        for (route, est) in [("gaussian", k.gaussian), ("cone", k.cone)] {
            s.check(Some(6), format!("kn-{route}-n{n}"), est.z_score(closed), AtMost, Z_MAX)
                .with_estimate(est.mean)
                .with_target(closed)
                .with_stderr(est.stderr);
        }
        let joint = (k.gaussian.stderr.powi(2) + k.cone.stderr.powi(2)).sqrt();
        s.check(Some(6), format!("kn-routes-agree-n{n}"), (k.gaussian.mean - k.cone.mean).norm() / joint, AtMost, Z_MAX);
        let rel = k.gaussian.stderr.max(k.cone.stderr) / k.closed;
        let tol = s.stderr_tol();
        s.check(Some(6), format!("kn-stderr-n{n}"), rel, AtMost, tol);
        s.quantity(format!("kn-half-prefactor-ratio-n{n}"), k.half_prefactor_ratio(), Some(0.5 * k.gaussian.stderr / k.closed));
    }
    Ok(())
}

/// Weighted `Re(estimate/target)` over sandwich checks; weights are inverse relative variances.
fn fitted_ratio(checks: &[ResolutionCheck]) -> (f64, f64) {
    let (mut num, mut den) = (0.0, 0.0);
    for c in checks {
        let rel = (c.stderr / c.target.norm()).max(1e-12);
        let w = rel.powi(-2);
        num += w * (c.estimate / c.target).re;
        den += w;
    }
    (num / den, den.sqrt().recip())
}

fn resolution(s: &mut Session) -> Result<()> {
    let mut worst = 0.0f64;
    for (a, b) in FIDUCIAL_FAMILY {
        let adm = admissibility_1d(&Fiducial1D::new(a, b)?);
        worst = worst.max((adm.quadrature / adm.closed - 1.0).abs());
    }
    s.check(Some(3), "admissibility-1d", worst, AtMost, 1e-3);

    for n in s.dims(&[2]).into_iter().filter(|&n| n >= 2) {
        let fid = FiducialND::new(n, s.alpha(1.0), s.beta(1.0))?;
        let adm = admissibility_nd(&fid, &s.mc(20 + n as u64))?;
        s.check(Some(7), format!("admissibility-n{n}"), adm.z_score_exact(), AtMost, Z_MAX)
            .with_estimate(adm.mc.mean)
            .with_target(cz(adm.closed_exact))
            .with_stderr(adm.mc.stderr);
        let tol = s.stderr_tol();
        s.check(Some(7), format!("admissibility-stderr-n{n}"), adm.mc.stderr / adm.closed_exact, AtMost, tol);
        s.quantity(format!("admissibility-mc-over-closed-n{n}"), adm.ratio(), Some(adm.mc.stderr / adm.closed));
    }

    for n in s.dims(&[1, 2]) {
        let fid = FiducialND::new(n, s.alpha(1.0), s.beta(1.0))?;
        let mut rng = s.rng(30 + n as u64);
        let labels: Vec<LabelG> = (0..3).map(|_| LabelG::random(&mut rng, n, 0.5)).collect();
        let pairs = [(0, 0), (0, 1), (1, 2), (2, 2)];
        let nconst = fid.nconst_resolution();
        let mut fits = Vec::new();
        let (mut zmax, mut rel_max, mut printed) = (0.0f64, 0.0f64, Vec::new());
        for (round, tag) in [(0, 40u64), (1, 50u64)] {
            let mut checks = Vec::new();
            for (i, &(p, q)) in pairs.iter().enumerate() {
                let mc = s.mc(tag + 10 * n as u64 + i as u64);
                let c = if n == 1 {
                    let f1 = Fiducial1D::new(fid.alpha, fid.beta)?;
                    let lab = |l: &LabelG| Label1D::new(l.f.get(0, 0), l.g.as_matrix()[(0, 0)]);
                    resolution_check_1d(&f1, &lab(&labels[p])?, &lab(&labels[q])?, &mc)?
                } else {
                    let r = resolution_check_nd(&fid, &labels[p], &labels[q], &mc)?;
                    if round == 0 {
                        printed.push(r.printed_ratio);
                    }
                    r.check
                };
                if round == 0 {
                    // the 1-D diagonal sandwich is exact, so its stderr can vanish
                    let z = (c.estimate - c.target).norm() / c.stderr.max(1e-12 * c.target.norm());
                    zmax = zmax.max(z);
                    rel_max = rel_max.max(c.stderr / c.target.norm());
                }
                checks.push(c);
            }
            fits.push(fitted_ratio(&checks));
        }
        s.check(Some(8), format!("resolution-z-n{n}"), zmax, AtMost, Z_MAX);
        let tol = s.stderr_tol();
        s.check(Some(8), format!("resolution-stderr-n{n}"), rel_max, AtMost, tol);
        let (c0, c1) = (nconst * fits[0].0, nconst * fits[1].0);
        s.check(Some(8), format!("resolution-constant-seed-stable-n{n}"), (c0 - c1).abs(), AtMost, third_figure_tolerance(c0))
            .with_estimate(cz(c0))
            .with_target(cz(c1))
            .with_stderr(nconst * fits[0].1);
        s.quantity(format!("resolution-constant-n{n}"), c0, Some(nconst * fits[0].1));
        if !printed.is_empty() {
            let mean = printed.iter().sum::<f64>() / printed.len() as f64;
            s.quantity(format!("resolution-printed-constant-ratio-n{n}"), mean, None);
        }
    }
    Ok(())
}

fn jacobian(s: &mut Session) -> Result<()> {
    let mut rng = s.rng(60);
    let mut worst = 0.0f64;
    for n in 1..=5 {
        for _ in 0..40 {
            let sm = sample_glplus_with(&mut rng, n, 1.0);
            let f = polar_decompose(&sm)?;
            let s_mat = sm.as_matrix();
            let mut err = (&f.m * &f.t - s_mat).norm() / s_mat.norm();
            err = err.max((f.m.transpose() * &f.m - DMatrix::identity(n, n)).amax());
            err = err.max((f.m.determinant() - 1.0).abs());
            let triangular = (0..n).all(|i| f.t[(i, i)] > 0.0 && (0..i).all(|j| f.t[(i, j)] == 0.0));
            if !triangular {
                err = f64::INFINITY;
            }
            worst = worst.max(err);
        }
    }
    s.check(Some(11), "polar-round-trip", worst, AtMost, 1e-12);

    let mut worst = 0.0f64;
    for n in 1..=4 {
        for _ in 0..20 {
            let t = DMatrix::from_fn(n, n, |i, j| match i.cmp(&j) {
                std::cmp::Ordering::Less => rng.random_range(-1.0..1.0),
                std::cmp::Ordering::Equal => rng.random_range(0.5..2.0),
                std::cmp::Ordering::Greater => 0.0,
            });
            let product = jacobian_t_to_g(&t) / jacobian_polar(&t);
            worst = worst.max((product / (2f64.powi(n as i32) * t.determinant()) - 1.0).abs());
        }
    }
    s.check(Some(11), "jacobian-product", worst, AtMost, 1e-12);

    let family = [0.5, 1.0, 1.5];
    for n in s.dims(&[2, 3]) {
        let mut pooled = Vec::new();
        let mut spread = 0.0f64;
        for (round, tag) in [(0, 70u64), (1, 80u64)] {
            let mut ratios = Vec::new();
            for (i, &a) in family.iter().enumerate() {
                let p = pushforward_check(n, a, &s.mc(tag + 10 * n as u64 + i as u64))?;
                ratios.push((p.ratio, p.ratio_stderr));
            }
            let w: f64 = ratios.iter().map(|r| r.1.powi(-2)).sum();
            let mean = ratios.iter().map(|r| r.0 * r.1.powi(-2)).sum::<f64>() / w;
            if round == 0 {
                spread = ratios.iter().map(|r| (r.0 - mean).abs() / r.1).fold(0.0, f64::max);
            }
            pooled.push((mean, w.sqrt().recip()));
        }
        s.check(Some(11), format!("pushforward-constant-n{n}"), spread, AtMost, Z_MAX);
        let (a, b) = (pooled[0], pooled[1]);
        s.check(Some(11), format!("pushforward-seed-stable-n{n}"), (a.0 - b.0).abs() / a.1.hypot(b.1), AtMost, Z_MAX)
            .with_estimate(cz(a.0))
            .with_target(cz(b.0))
            .with_stderr(a.1);
        s.quantity(format!("pushforward-ratio-n{n}"), a.0, Some(a.1));
    }
    Ok(())
}

fn polarization(s: &mut Session) -> Result<()> {
    let mut rng = s.rng(90);
    for n in s.dims(&[1, 2]) {
        let (mut worst, mut order) = (0.0f64, f64::INFINITY);
        if n == 1 {
            let fid = s.fid1(0.5, 1.0)?;
            for i in 0..100 {
                let l = random_label_1d(&mut rng, 1.0, (0.5, 2.0))?;
                let psi = random_label_1d(&mut rng, 1.0, (0.5, 2.0))?;
                worst = worst.max(polarization_residual_1d(&fid, &l, &psi, 1e-3).residual);
                if i < 5 {
                    order = order.min(polarization_order_1d(&fid, &l, &psi, 0.02));
                }
            }
        } else {
            let fid = FiducialND::new(n, s.alpha(1.0), s.beta(1.3))?;
            for i in 0..100 {
                let l = LabelG::random(&mut rng, n, 1.0);
                let psi = LabelG::random(&mut rng, n, 1.0);
                worst = worst.max(polarization_residual_nd(&fid, &l, &psi, 1e-2)?.residual);
                if i < 5 {
                    order = order.min(polarization_order_nd(&fid, &l, &psi, 0.2)?);
                }
            }
        }
        let tol = if n == 1 { 1e-6 } else { 1e-5 };
        s.check(Some(9), format!("polarization-n{n}"), worst, AtMost, tol);
        s.check(Some(9), format!("polarization-order-n{n}"), order, AtLeast, 3.5);
    }
    Ok(())
}

fn geometry(s: &mut Session) -> Result<()> {
    let mut rng = s.rng(100);
    for n in s.dims(&[1, 2]) {
        let (mut order, mut rel, mut vs_printed) = (f64::INFINITY, 0.0f64, 0.0f64);
        if n == 1 {
            let fid = s.fid1(0.5, 1.0)?;
            for _ in 0..10 {
                let l = random_label_1d(&mut rng, 1.0, (0.5, 2.0))?;
                let (df, dg) = (0.02 * rng.random_range(0.5..1.5), 0.03 * l.g * rng.random_range(0.5..1.5));
                order = order.min(expansion_order_1d(&fid, &l, df, dg)?);
                let e = local_expansion_1d(&fid, &l, 0.05 * df, 0.05 * dg)?;
                rel = rel.max(e.mismatch() / (e.dtheta_formula.abs() + e.dsigma2_formula));
                let e = local_expansion_1d(&fid, &l, df, dg)?;
                vs_printed = vs_printed.max(e.mismatch() / e.mismatch_printed());
            }
        } else {
            let fid = FiducialND::new(n, s.alpha(1.0), s.beta(1.3))?;
            for _ in 0..10 {
                let l = LabelG::random(&mut rng, n, 1.0);
                let (df, dg) = (sample_sym_with(&mut rng, n, 0.05), sample_sym_with(&mut rng, n, 0.05));
                order = order.min(expansion_order_nd(&fid, &l, &df, &dg)?);
                let e = local_expansion_nd(&fid, &l, &df.scaled(0.05), &dg.scaled(0.05))?;
                rel = rel.max(e.mismatch() / (e.dtheta_formula.abs() + e.dsigma2_formula));
                let e = local_expansion_nd(&fid, &l, &df, &dg)?;
                vs_printed = vs_printed.max(e.mismatch() / e.mismatch_printed());
            }
        }
        s.check(Some(10), format!("expansion-order-n{n}"), order, AtLeast, 2.7);
        s.check(Some(10), format!("expansion-remainder-n{n}"), rel, AtMost, 1e-3);
        s.check(None, format!("ray-metric-coefficient-n{n}"), vs_printed, AtMost, 0.1);
    }
    Ok(())
}

fn propagate(s: &mut Session) -> Result<()> {
    let q = s.cfg.quadrature;
    let fid = s.fid1(2.0, 2.0)?;
    let (a, b) = (Label1D::new(0.3, 1.2)?, Label1D::new(-0.2, 0.9)?);
    let ttotal = 0.5;
    let slices: Vec<usize> = std::iter::successors(Some(1usize), |m| Some(2 * m)).take_while(|&m| m <= q.max_slices).collect();
    for (name, h) in [("sigma", HamiltonianSpec1D::LinearSigma { c: 1.0 }), ("kappa", HamiltonianSpec1D::LinearKappa { c: 1.0 })] {
        let exact = analytic_propagator(&fid, &h, ttotal, &a, &b)?;
        let mut errs = Vec::with_capacity(slices.len());
        let mut last = Complex64::new(0.0, 0.0);
        for &m in &slices {
            let cfg = SlicingConfig {
                mslices: m,
                ttotal,
                spectral_points: q.spectral_points,
                scale_nodes: q.scale_nodes,
                ..Default::default()
            };
            let r = time_sliced_propagator(&fid, &h, &cfg, &a, &b)?;
            errs.push((r.value - exact).norm() / exact.norm());
            last = r.value;
        }
        for (m, e) in slices.iter().zip(&errs) {
            s.quantity(format!("sliced-error-{name}-m{m}"), *e, None);
        }
        let rise = errs.windows(2).map(|w| w[1] - w[0]).fold(f64::NEG_INFINITY, f64::max).max(0.0);
        s.check(Some(12), format!("sliced-monotone-{name}"), rise, AtMost, 0.0);
        let final_err = *errs.last().expect("at least one slice count");
        s.check(Some(12), format!("sliced-error-{name}"), final_err, AtMost, 0.01).with_estimate(last).with_target(exact);
    }

    let fid = Fiducial1D::new(1.0, 2.0)?;
    let mut rng = s.rng(110);
    let mut worst = 0.0f64;
    for h in [HamiltonianSpec1D::LinearSigma { c: 1.0 }, HamiltonianSpec1D::LinearKappa { c: 0.7 }] {
        let a = random_label_1d(&mut rng, 1.0, (0.5, 2.0))?;
        let b = random_label_1d(&mut rng, 1.0, (0.5, 2.0))?;
        let prop = GridPropagator::for_labels(&fid, &h, &[a, b], 2.0, q.propagator_points)?;
        for t in [0.3, 1.0, 2.0] {
            worst = worst.max((prop.amplitude(t, &a, &b)? - analytic_propagator(&fid, &h, t, &a, &b)?).norm());
        }
    }
    s.check(Some(12), "grid-propagator", worst, AtMost, 1e-5);

    let fid = FiducialND::new(2, 2.0, 1.0)?;
    let mut rng = s.rng(120);
    let (l_in, l_out) = (LabelG::random(&mut rng, 2, 0.3), LabelG::random(&mut rng, 2, 0.3));
    let sigma = SymMatrixR::from_upper(2, &[1.0, 0.3, 0.5])?;
    let mut errs = Vec::new();
    for m in [6, 10] {
        let cfg = NdSmokeConfig { nodes_f: m, nodes_g: m, ..Default::default() };
        errs.push(time_sliced_nd_smoke(&fid, 0.2, &sigma, 0.2, &l_out, &l_in, &cfg)?.error());
    }
    s.quantity("nd-smoke-error", errs[1], None);
    s.check(None, "nd-smoke-refines", errs[1] / errs[0], AtMost, 1.0);
    Ok(())
}

fn lower_symbol(s: &mut Session) -> Result<()> {
    let fid = s.fid1(2.0, 2.0)?;
    let mut rng = s.rng(130);
    let mut pairs = Vec::new();
    for _ in 0..4 {
        pairs.push((random_label_1d(&mut rng, 0.5, (0.7, 1.5))?, random_label_1d(&mut rng, 0.5, (0.7, 1.5))?));
    }
    let fit = fit_lower_symbol(&fid, &pairs, &s.mc(140))?;
    s.check(None, "lower-symbol-fit", (fit.gamma_h - fit.exact).abs() / fit.stderr, AtMost, Z_MAX)
        .with_estimate(cz(fit.gamma_h))
        .with_target(cz(fit.exact))
        .with_stderr(fit.stderr);
    let tol = s.stderr_tol();
    s.check(None, "lower-symbol-fit-stderr", fit.stderr / fit.exact.abs(), AtMost, tol);
    let candidate = LowerSymbolCandidate::LinearG { gamma_h: gamma_lower(&fid) };
    let (a, b) = pairs[0];
    let chk = lower_symbol_verify(&fid, 1.0, candidate, &a, &b, &s.mc(150))?;
    s.check(None, "lower-symbol-sandwich", chk.z_score(), AtMost, Z_MAX)
        .with_estimate(chk.rhs)
        .with_target(chk.lhs)
        .with_stderr(chk.stderr);
    Ok(())
}
