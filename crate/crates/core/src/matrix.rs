//! Dense real and complex matrix kernel: symmetric storage, Cholesky, matrix exponential,
//! the principal complex log-determinant on `Re X ≻ 0`, and seeded samplers.

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};

/// Relative pivot floor for Cholesky: a pivot at or below `PIVOT_TOL · max|a_ij|` fails.
pub const PIVOT_TOL: f64 = 1e-13;

/// Diagonal guard added to sampled SPD matrices, relative to the requested scale.
pub const SPD_GUARD: f64 = 1e-9;

/// Real symmetric matrix. Built by mirroring one triangle, so exact symmetry holds.
#[derive(Debug, Clone, PartialEq)]
pub struct SymMatrixR {
    mat: DMatrix<f64>,
}

impl SymMatrixR {
    pub fn zeros(n: usize) -> Self {
        Self { mat: DMatrix::zeros(n, n) }
    }

    pub fn identity(n: usize) -> Self {
        Self { mat: DMatrix::identity(n, n) }
    }

    /// From the packed upper triangle, row by row: `(0,0), (0,1), …, (0,n-1), (1,1), …`.
    pub fn from_upper(n: usize, packed: &[f64]) -> Result<Self> {
        let d = n * (n + 1) / 2;
        if packed.len() != d {
            return Err(Error::DimensionMismatch { expected: d, found: packed.len() });
        }
        let mut mat = DMatrix::zeros(n, n);
        let mut it = packed.iter();
        for i in 0..n {
            for j in i..n {
                let v = *it.next().unwrap();
                mat[(i, j)] = v;
                mat[(j, i)] = v;
            }
        }
        Ok(Self { mat })
    }

    /// Takes the upper triangle of `m`; fails if `m` is visibly asymmetric.
    pub fn from_matrix(m: &DMatrix<f64>) -> Result<Self> {
        let n = m.nrows();
        if m.ncols() != n {
            return Err(Error::DimensionMismatch { expected: n, found: m.ncols() });
        }
        let scale = m.amax().max(f64::MIN_POSITIVE);
        let asym = (m - m.transpose()).amax();
        if asym > 1e-10 * scale {
            return Err(Error::NotSymmetric { asym });
        }
        Ok(Self::mirror_upper(m))
    }

    /// Mirrors the upper triangle of `m` without checking.
    pub fn mirror_upper(m: &DMatrix<f64>) -> Self {
        let n = m.nrows();
        let mut mat = m.clone();
        for i in 0..n {
            for j in 0..i {
                mat[(i, j)] = mat[(j, i)];
            }
        }
        Self { mat }
    }

    pub fn from_diagonal(diag: &[f64]) -> Self {
        Self { mat: DMatrix::from_diagonal(&nalgebra::DVector::from_column_slice(diag)) }
    }

    pub fn n(&self) -> usize {
        self.mat.nrows()
    }

    pub fn as_matrix(&self) -> &DMatrix<f64> {
        &self.mat
    }

    pub fn into_matrix(self) -> DMatrix<f64> {
        self.mat
    }

    pub fn get(&self, a: usize, b: usize) -> f64 {
        self.mat[(a, b)]
    }

    pub fn upper(&self) -> Vec<f64> {
        let n = self.n();
        let mut out = Vec::with_capacity(n * (n + 1) / 2);
        for i in 0..n {
            for j in i..n {
                out.push(self.mat[(i, j)]);
            }
        }
        out
    }

    pub fn scaled(&self, c: f64) -> Self {
        Self { mat: &self.mat * c }
    }

    pub fn add(&self, other: &Self) -> Self {
        Self { mat: &self.mat + &other.mat }
    }

    pub fn sub(&self, other: &Self) -> Self {
        Self { mat: &self.mat - &other.mat }
    }

    /// `Mᵀ A M` (symmetric for any square `M`).
    pub fn congruence(&self, m: &DMatrix<f64>) -> Self {
        Self::mirror_upper(&(m.transpose() * &self.mat * m))
    }
}

/// Symmetric positive-definite matrix with its Cholesky factor.
#[derive(Debug, Clone, PartialEq)]
pub struct SpdMatrix {
    mat: DMatrix<f64>,
    chol: DMatrix<f64>,
}

impl SpdMatrix {
    pub fn new(sym: SymMatrixR) -> Result<Self> {
        let chol = cholesky(sym.as_matrix())?;
        Ok(Self { mat: sym.into_matrix(), chol })
    }

    pub fn from_matrix(m: &DMatrix<f64>) -> Result<Self> {
        Self::new(SymMatrixR::from_matrix(m)?)
    }

    pub fn identity(n: usize) -> Self {
        Self { mat: DMatrix::identity(n, n), chol: DMatrix::identity(n, n) }
    }

    pub fn from_diagonal(diag: &[f64]) -> Result<Self> {
        Self::new(SymMatrixR::from_diagonal(diag))
    }

    pub fn n(&self) -> usize {
        self.mat.nrows()
    }

    pub fn as_matrix(&self) -> &DMatrix<f64> {
        &self.mat
    }

    pub fn to_sym(&self) -> SymMatrixR {
        SymMatrixR { mat: self.mat.clone() }
    }

    /// Lower Cholesky factor `L` with `L Lᵀ = A`.
    pub fn cholesky_factor(&self) -> &DMatrix<f64> {
        &self.chol
    }

    pub fn ln_det(&self) -> f64 {
        2.0 * self.chol.diagonal().iter().map(|d| d.ln()).sum::<f64>()
    }

    pub fn det(&self) -> f64 {
        self.ln_det().exp()
    }

    pub fn inverse(&self) -> SpdMatrix {
        let n = self.n();
        let linv = lower_triangular_inverse(&self.chol);
        let inv = linv.transpose() * &linv;
        let sym = SymMatrixR::mirror_upper(&inv);
        let chol = cholesky(sym.as_matrix()).unwrap_or_else(|_| DMatrix::identity(n, n));
        SpdMatrix { mat: sym.into_matrix(), chol }
    }
}

/// Real square matrix with positive determinant.
#[derive(Debug, Clone, PartialEq)]
pub struct GlPlusMatrix {
    mat: DMatrix<f64>,
}

impl GlPlusMatrix {
    pub fn new(mat: DMatrix<f64>) -> Result<Self> {
        if mat.nrows() != mat.ncols() {
            return Err(Error::DimensionMismatch { expected: mat.nrows(), found: mat.ncols() });
        }
        let det = mat.determinant();
        if !(det > 0.0) {
            return Err(Error::NotGlPlus { det });
        }
        Ok(Self { mat })
    }

    pub fn identity(n: usize) -> Self {
        Self { mat: DMatrix::identity(n, n) }
    }

    pub fn n(&self) -> usize {
        self.mat.nrows()
    }

    pub fn as_matrix(&self) -> &DMatrix<f64> {
        &self.mat
    }

    pub fn det(&self) -> f64 {
        self.mat.determinant()
    }
}

/// Complex symmetric matrix `X = A + iB`.
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexSymMatrix {
    mat: DMatrix<Complex64>,
}

impl ComplexSymMatrix {
    pub fn new(re: &SymMatrixR, im: &SymMatrixR) -> Result<Self> {
        if re.n() != im.n() {
            return Err(Error::DimensionMismatch { expected: re.n(), found: im.n() });
        }
        let n = re.n();
        let mat = DMatrix::from_fn(n, n, |i, j| Complex64::new(re.get(i, j), im.get(i, j)));
        Ok(Self { mat })
    }

    pub fn from_diagonal(diag: &[Complex64]) -> Self {
        let n = diag.len();
        Self { mat: DMatrix::from_fn(n, n, |i, j| if i == j { diag[i] } else { Complex64::new(0.0, 0.0) }) }
    }

    pub fn n(&self) -> usize {
        self.mat.nrows()
    }

    pub fn as_matrix(&self) -> &DMatrix<Complex64> {
        &self.mat
    }

    pub fn real_part(&self) -> DMatrix<f64> {
        self.mat.map(|z| z.re)
    }

    pub fn imag_part(&self) -> DMatrix<f64> {
        self.mat.map(|z| z.im)
    }
}

/// Cholesky factorization `A = L Lᵀ` with a relative pivot floor.
pub fn cholesky(a: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let n = a.nrows();
    if a.ncols() != n {
        return Err(Error::DimensionMismatch { expected: n, found: a.ncols() });
    }
    let floor = PIVOT_TOL * a.amax();
    let mut l = DMatrix::<f64>::zeros(n, n);
    for j in 0..n {
        let mut d = a[(j, j)];
        for k in 0..j {
            d -= l[(j, k)] * l[(j, k)];
        }
        if !(d > floor) {
            return Err(Error::NotPositiveDefinite { row: j, pivot: d });
        }
        let djj = d.sqrt();
        l[(j, j)] = djj;
        for i in (j + 1)..n {
            let mut s = a[(i, j)];
            for k in 0..j {
                s -= l[(i, k)] * l[(j, k)];
            }
            l[(i, j)] = s / djj;
        }
    }
    Ok(l)
}

/// Inverse of a lower-triangular matrix by forward substitution.
pub fn lower_triangular_inverse(l: &DMatrix<f64>) -> DMatrix<f64> {
    let n = l.nrows();
    let mut inv = DMatrix::<f64>::zeros(n, n);
    for col in 0..n {
        for i in col..n {
            let mut s = if i == col { 1.0 } else { 0.0 };
            for k in col..i {
                s -= l[(i, k)] * inv[(k, col)];
            }
            inv[(i, col)] = s / l[(i, i)];
        }
    }
    inv
}

/// Matrix exponential (Padé scaling-and-squaring, via nalgebra).
pub fn mat_exp(b: &DMatrix<f64>) -> DMatrix<f64> {
    b.clone().exp()
}

/// Unpivoted LU pivots of a complex matrix.
///
/// On matrices with positive-definite Hermitian part every pivot has positive real part
/// (Schur complements of accretive matrices stay accretive), so no pivoting is needed.
pub fn lu_pivots(x: &DMatrix<Complex64>) -> Vec<Complex64> {
    let n = x.nrows();
    let mut a = x.clone();
    let mut pivots = Vec::with_capacity(n);
    for k in 0..n {
        let p = a[(k, k)];
        pivots.push(p);
        for i in (k + 1)..n {
            let f = a[(i, k)] / p;
            for j in (k + 1)..n {
                let akj = a[(k, j)];
                a[(i, j)] -= f * akj;
            }
        }
    }
    pivots
}

/// Principal log-determinant of an accretive complex matrix: the sum of principal logs of
/// its unpivoted LU pivots. Fails unless every pivot has positive real part.
pub fn logdet_accretive(x: &DMatrix<Complex64>) -> Result<Complex64> {
    let mut acc = Complex64::new(0.0, 0.0);
    for p in lu_pivots(x) {
        if !(p.re > 0.0) {
            return Err(Error::RealPartNotSpd);
        }
        acc += p.ln();
    }
    Ok(acc)
}

/// `log det X` for complex symmetric `X` with `Re X ≻ 0`.
///
/// The branch is the one continuous on the whole domain and real on real `X`: each LU
/// pivot lies in the open right half-plane, so summing principal logs never crosses a cut.
pub fn complex_symlogdet(x: &ComplexSymMatrix) -> Result<Complex64> {
    cholesky(&x.real_part()).map_err(|_| Error::RealPartNotSpd)?;
    logdet_accretive(x.as_matrix())
}

fn gaussian_matrix<R: Rng>(rng: &mut R, n: usize, sd: f64) -> DMatrix<f64> {
    DMatrix::from_fn(n, n, |_, _| sd * rng.sample::<f64, _>(StandardNormal))
}

/// Random SPD matrix `Q Qᵀ + ε I` with `E[Q Qᵀ] = scale · I`.
pub fn sample_spd_with<R: Rng>(rng: &mut R, n: usize, scale: f64) -> SpdMatrix {
    let q = gaussian_matrix(rng, n, (scale / n as f64).sqrt());
    let mut a = &q * q.transpose();
    for i in 0..n {
        a[(i, i)] += SPD_GUARD * scale;
    }
    SpdMatrix::new(SymMatrixR::mirror_upper(&a)).expect("guarded Gram matrix is positive definite")
}

/// Random matrix with positive determinant and `E[S Sᵀ] = scale² · I`, by rejection.
pub fn sample_glplus_with<R: Rng>(rng: &mut R, n: usize, scale: f64) -> GlPlusMatrix {
    let sd = scale / (n as f64).sqrt();
    loop {
        let m = gaussian_matrix(rng, n, sd);
        if m.determinant() > 0.0 {
            return GlPlusMatrix { mat: m };
        }
    }
}

/// Random symmetric matrix with independent `N(0, scale²)` upper-triangle entries.
pub fn sample_sym_with<R: Rng>(rng: &mut R, n: usize, scale: f64) -> SymMatrixR {
    let packed: Vec<f64> =
        (0..n * (n + 1) / 2).map(|_| scale * rng.sample::<f64, _>(StandardNormal)).collect();
    SymMatrixR::from_upper(n, &packed).expect("packed length matches")
}

pub fn sample_spd(n: usize, seed: u64, scale: f64) -> SpdMatrix {
    sample_spd_with(&mut ChaCha8Rng::seed_from_u64(seed), n, scale)
}

pub fn sample_glplus(n: usize, seed: u64, scale: f64) -> GlPlusMatrix {
    sample_glplus_with(&mut ChaCha8Rng::seed_from_u64(seed), n, scale)
}

pub fn sample_sym(n: usize, seed: u64, scale: f64) -> SymMatrixR {
    sample_sym_with(&mut ChaCha8Rng::seed_from_u64(seed), n, scale)
}

/// Symmetric square root and inverse square root of an SPD matrix.
pub fn spd_sqrt_pair(a: &DMatrix<f64>) -> (DMatrix<f64>, DMatrix<f64>) {
    let eig = SymmetricEigen::new(a.clone());
    let v = &eig.eigenvectors;
    let s = eig.eigenvalues.map(|l| l.max(0.0).sqrt());
    let si = s.map(|x| 1.0 / x);
    let root = v * DMatrix::from_diagonal(&s) * v.transpose();
    let inv_root = v * DMatrix::from_diagonal(&si) * v.transpose();
    (root, inv_root)
}

/// Lifts a real matrix into the complex field.
pub fn complexify(m: &DMatrix<f64>) -> DMatrix<Complex64> {
    m.map(|x| Complex64::new(x, 0.0))
}

/// Max-entry asymmetry `max|A - Aᵀ|`.
pub fn asymmetry(m: &DMatrix<f64>) -> f64 {
    (m - m.transpose()).amax()
}
