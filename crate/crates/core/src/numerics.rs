//! Dense complex linear algebra with explicit rank and residual tolerances.
//!
//! Every routine here is a pure function of its arguments. Rank decisions are
//! relative: a singular value counts as zero when it falls below
//! `rank_tol * max(sigma_max, 1)`. The floor keeps roundoff-sized matrices
//! from being promoted to full rank.

use faer::{Mat, MatRef, Side};
use nalgebra::{DMatrix, DVector, QR};
use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};

pub type CMat = DMatrix<Complex64>;
pub type CVec = DVector<Complex64>;

/// Eigenvalue threshold used when intersecting two subspaces through the
/// spectrum of the sum of their projections.
pub const INTERSECTION_TOL: f64 = 1e-8;

/// Numerical tolerances shared by all modules.
#[derive(Clone, Copy, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct Tolerances {
    /// Singular values below `rank_tol * max(sigma_max, 1)` are treated as zero.
    pub rank_tol: f64,
    /// Default pass/fail threshold for residual checks.
    pub residual_tol: f64,
    /// Negative eigenvalues of nominally PSD matrices above `-psd_clip` are clipped.
    pub psd_clip: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            rank_tol: 1e-10,
            residual_tol: 1e-8,
            psd_clip: 1e-12,
        }
    }
}

impl Tolerances {
    pub fn new(rank_tol: f64, residual_tol: f64, psd_clip: f64) -> Result<Self> {
        let tol = Self {
            rank_tol,
            residual_tol,
            psd_clip,
        };
        tol.validate()?;
        Ok(tol)
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("rank_tol", self.rank_tol),
            ("residual_tol", self.residual_tol),
            ("psd_clip", self.psd_clip),
        ] {
            if !(v > 0.0 && v < 1.0) {
                return Err(Error::InvalidArgument(format!(
                    "{name} must lie in (0, 1), got {v}"
                )));
            }
        }
        Ok(())
    }

    pub fn with_residual_tol(mut self, residual_tol: f64) -> Result<Self> {
        self.residual_tol = residual_tol;
        self.validate()?;
        Ok(self)
    }
}

pub fn c64(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

pub fn real(re: f64) -> Complex64 {
    Complex64::new(re, 0.0)
}

pub fn identity(d: usize) -> CMat {
    CMat::identity(d, d)
}

/// `(X + X*) / 2`.
pub fn hermitian_part(x: &CMat) -> CMat {
    (x + x.adjoint()).scale(0.5)
}


// Decompositions go through faer, whose complex SVD and Hermitian eigensolver are
// backward stable. nalgebra's complex SVD returned inaccurate singular vectors on
// rank-deficient inputs.

fn to_faer(a: &CMat) -> Mat<Complex64> {
    Mat::from_fn(a.nrows(), a.ncols(), |i, j| a[(i, j)])
}

fn from_faer(m: MatRef<'_, Complex64>) -> CMat {
    CMat::from_fn(m.nrows(), m.ncols(), |i, j| m[(i, j)])
}

/// Thin SVD `A = U diag(s) V*`, singular values in nonincreasing order.
#[derive(Clone, Debug)]
pub struct Svd {
    pub u: CMat,
    pub s: Vec<f64>,
    pub v: CMat,
}

pub fn thin_svd(a: &CMat) -> Svd {
    let (m, n) = a.shape();
    let k = m.min(n);
    if k == 0 {
        return Svd {
            u: CMat::zeros(m, 0),
            s: Vec::new(),
            v: CMat::zeros(n, 0),
        };
    }
    let svd = to_faer(a).thin_svd().expect("SVD did not converge");
    Svd {
        u: from_faer(svd.U()),
        s: (0..k).map(|i| svd.S()[i].re).collect(),
        v: from_faer(svd.V()),
    }
}

pub fn singular_values(a: &CMat) -> Vec<f64> {
    if a.is_empty() {
        return Vec::new();
    }
    to_faer(a).singular_values().expect("SVD did not converge")
}

/// Eigen-decomposition of the Hermitian part of `a`, eigenvalues nondecreasing.
#[derive(Clone, Debug)]
pub struct HermitianEigen {
    pub values: Vec<f64>,
    pub vectors: CMat,
}

pub fn hermitian_eigen(a: &CMat) -> HermitianEigen {
    let d = a.nrows();
    if d == 0 {
        return HermitianEigen {
            values: Vec::new(),
            vectors: CMat::zeros(0, 0),
        };
    }
    let h = to_faer(&hermitian_part(a));
    let eig = h.self_adjoint_eigen(Side::Lower).expect("eigensolver did not converge");
    HermitianEigen {
        values: (0..d).map(|i| eig.S()[i].re).collect(),
        vectors: from_faer(eig.U()),
    }
}

/// Smallest eigenvalue of the Hermitian part.
pub fn min_eigenvalue(a: &CMat) -> f64 {
    hermitian_eigen(a).values.first().copied().unwrap_or(0.0)
}

/// Largest singular value. Empty matrices have norm zero.
pub fn operator_norm(a: &CMat) -> f64 {
    if a.is_empty() {
        return 0.0;
    }
    singular_values(a).first().copied().unwrap_or(0.0)
}

/// Orthonormal basis of the numerical range of `a`.
///
/// The result has one column per singular value above `rank_tol * max(sigma_max, 1)`;
/// a zero matrix yields a matrix with zero columns.
pub fn orthonormal_range(a: &CMat, tol: &Tolerances) -> CMat {
    let rows = a.nrows();
    if a.is_empty() {
        return CMat::zeros(rows, 0);
    }
    let svd = thin_svd(a);
    let sigma_max = svd.s.first().copied().unwrap_or(0.0);
    if sigma_max == 0.0 || !sigma_max.is_finite() {
        return CMat::zeros(rows, 0);
    }
    let cut = tol.rank_tol * sigma_max.max(1.0);
    let keep: Vec<usize> = svd
        .s
        .iter()
        .enumerate()
        .filter(|(_, s)| **s > cut)
        .map(|(i, _)| i)
        .collect();
    select_columns(&svd.u, &keep)
}

/// Numerical rank under the relative threshold.
pub fn numerical_rank(a: &CMat, tol: &Tolerances) -> usize {
    if a.is_empty() {
        return 0;
    }
    let sv = singular_values(a);
    let sigma_max = sv.first().copied().unwrap_or(0.0);
    if sigma_max == 0.0 {
        return 0;
    }
    sv.iter().filter(|s| **s > tol.rank_tol * sigma_max.max(1.0)).count()
}

/// Orthonormal basis of the orthogonal complement of `span(q)` in the ambient space.
pub fn orthogonal_complement(q: &CMat, tol: &Tolerances) -> CMat {
    let d = q.nrows();
    if q.ncols() == 0 {
        return identity(d);
    }
    let residual = identity(d) - q * q.adjoint();
    orthonormal_range(&residual, tol)
}

/// Orthonormal basis of the numerical kernel of `a`.
pub fn null_space(a: &CMat, tol: &Tolerances) -> CMat {
    let row_space = orthonormal_range(&a.adjoint(), tol);
    orthogonal_complement(&row_space, tol)
}

/// Hermitian PSD square root via the spectral decomposition.
///
/// Eigenvalues in `[-psd_clip, 0)` are clipped to zero; anything more negative
/// is rejected.
pub fn psd_sqrt(x: &CMat, tol: &Tolerances) -> Result<CMat> {
    if !x.is_square() {
        return Err(Error::DimensionMismatch(format!(
            "psd_sqrt expects a square matrix, got {}x{}",
            x.nrows(),
            x.ncols()
        )));
    }
    let d = x.nrows();
    if d == 0 {
        return Ok(CMat::zeros(0, 0));
    }
    let eig = hermitian_eigen(x);
    let min_eigenvalue = eig.values[0];
    if min_eigenvalue < -tol.psd_clip {
        return Err(Error::NotPsd { min_eigenvalue });
    }
    let roots: Vec<Complex64> = eig.values.iter().map(|l| real(l.max(0.0).sqrt())).collect();
    let q = &eig.vectors;
    let scaled = CMat::from_fn(d, d, |i, j| q[(i, j)] * roots[j]);
    Ok(hermitian_part(&(scaled * q.adjoint())))
}

/// `max(||Q1 Q1* - Q2 Q2*||, 0)`: zero exactly when the spans agree.
pub fn principal_angle_gap(q1: &CMat, q2: &CMat) -> Result<f64> {
    if q1.nrows() != q2.nrows() {
        return Err(Error::DimensionMismatch(format!(
            "subspaces live in ambient dimensions {} and {}",
            q1.nrows(),
            q2.nrows()
        )));
    }
    let diff = q1 * q1.adjoint() - q2 * q2.adjoint();
    Ok(operator_norm(&diff).max(0.0))
}

/// Orthonormal basis of `span(q1) ∩ span(q2)` for orthonormal inputs.
///
/// Uses the eigenvectors of `P1 + P2` with eigenvalue at least `2 - INTERSECTION_TOL`.
pub fn subspace_intersection(q1: &CMat, q2: &CMat) -> Result<CMat> {
    if q1.nrows() != q2.nrows() {
        return Err(Error::DimensionMismatch(format!(
            "cannot intersect subspaces of C^{} and C^{}",
            q1.nrows(),
            q2.nrows()
        )));
    }
    let d = q1.nrows();
    if q1.ncols() == 0 || q2.ncols() == 0 || d == 0 {
        return Ok(CMat::zeros(d, 0));
    }
    let sum = hermitian_part(&(q1 * q1.adjoint() + q2 * q2.adjoint()));
    let eig = hermitian_eigen(&sum);
    let keep: Vec<usize> = eig
        .values
        .iter()
        .enumerate()
        .filter(|(_, l)| **l >= 2.0 - INTERSECTION_TOL)
        .map(|(i, _)| i)
        .collect();
    Ok(select_columns(&eig.vectors, &keep))
}

/// Least-squares solution of `X * blocks_in[j] ≈ blocks_out[j]` for all `j`.
#[derive(Clone, Debug)]
pub struct LstsqSolution {
    pub solution: CMat,
    /// Frobenius norm of the stacked residual `X [B_1 ... B_m] - [C_1 ... C_m]`.
    pub residual: f64,
}

pub fn lstsq_intertwiner(
    blocks_in: &[CMat],
    blocks_out: &[CMat],
    tol: &Tolerances,
) -> Result<LstsqSolution> {
    if blocks_in.is_empty() {
        return Err(Error::EmptyInput("lstsq_intertwiner needs at least one block"));
    }
    if blocks_in.len() != blocks_out.len() {
        return Err(Error::DimensionMismatch(format!(
            "{} input blocks but {} output blocks",
            blocks_in.len(),
            blocks_out.len()
        )));
    }
    let p = blocks_in[0].nrows();
    let q = blocks_out[0].nrows();
    for (j, (b, c)) in blocks_in.iter().zip(blocks_out).enumerate() {
        if b.nrows() != p || c.nrows() != q || b.ncols() != c.ncols() {
            return Err(Error::DimensionMismatch(format!(
                "block {j}: input {}x{}, output {}x{} (expected {p} and {q} rows, equal widths)",
                b.nrows(),
                b.ncols(),
                c.nrows(),
                c.ncols()
            )));
        }
    }
    let b = hstack(blocks_in, p);
    let c = hstack(blocks_out, q);
    let solution = c.clone() * pseudo_inverse(&b, tol);
    let residual = (&solution * &b - &c).norm();
    Ok(LstsqSolution { solution, residual })
}

/// Moore-Penrose pseudo-inverse with the relative rank cutoff.
pub fn pseudo_inverse(a: &CMat, tol: &Tolerances) -> CMat {
    let (m, n) = a.shape();
    if a.is_empty() {
        return CMat::zeros(n, m);
    }
    let svd = thin_svd(a);
    let sigma_max = svd.s.first().copied().unwrap_or(0.0);
    if sigma_max == 0.0 {
        return CMat::zeros(n, m);
    }
    let cut = tol.rank_tol * sigma_max.max(1.0);
    let mut out = CMat::zeros(n, m);
    for (i, s) in svd.s.iter().enumerate() {
        if *s > cut {
            out += svd.v.column(i) * svd.u.column(i).adjoint() * real(1.0 / s);
        }
    }
    out
}

/// Concatenate matrices with `rows` rows side by side.
pub fn hstack(blocks: &[CMat], rows: usize) -> CMat {
    let cols: usize = blocks.iter().map(|b| b.ncols()).sum();
    let mut out = CMat::zeros(rows, cols);
    let mut at = 0;
    for b in blocks {
        out.view_mut((0, at), b.shape()).copy_from(b);
        at += b.ncols();
    }
    out
}

/// Stack matrices with `cols` columns on top of each other.
pub fn vstack(blocks: &[CMat], cols: usize) -> CMat {
    let rows: usize = blocks.iter().map(|b| b.nrows()).sum();
    let mut out = CMat::zeros(rows, cols);
    let mut at = 0;
    for b in blocks {
        out.view_mut((at, 0), b.shape()).copy_from(b);
        at += b.nrows();
    }
    out
}

pub fn select_columns(a: &CMat, cols: &[usize]) -> CMat {
    CMat::from_fn(a.nrows(), cols.len(), |i, j| a[(i, cols[j])])
}

/// `||A* A - I||` for a matrix expected to be an isometry.
pub fn isometry_defect(a: &CMat) -> f64 {
    operator_norm(&(a.adjoint() * a - identity(a.ncols())))
}

/// `||A A* A - A||` for a matrix expected to be a partial isometry.
pub fn partial_isometry_defect(a: &CMat) -> f64 {
    operator_norm(&(a * a.adjoint() * a - a))
}

/// Complex Gaussian matrix with independent standard normal real and imaginary parts.
pub fn random_gaussian<R: Rng + ?Sized>(rows: usize, cols: usize, rng: &mut R) -> CMat {
    CMat::from_fn(rows, cols, |_, _| {
        c64(rng.sample(StandardNormal), rng.sample(StandardNormal))
    })
}

/// Haar-distributed unitary from the phase-corrected QR of a Gaussian matrix.
pub fn random_unitary<R: Rng + ?Sized>(d: usize, rng: &mut R) -> CMat {
    random_isometry(d, d, rng)
}

/// Random `rows x cols` isometry (`cols <= rows`).
pub fn random_isometry<R: Rng + ?Sized>(rows: usize, cols: usize, rng: &mut R) -> CMat {
    assert!(cols <= rows, "an isometry needs cols <= rows");
    if cols == 0 {
        return CMat::zeros(rows, 0);
    }
    let qr = QR::new(random_gaussian(rows, cols, rng));
    let mut q = qr.q();
    let r = qr.r();
    for j in 0..cols {
        let d = r[(j, j)];
        let phase = if d.norm() > 0.0 { d / d.norm() } else { real(1.0) };
        let mut col = q.column_mut(j);
        col *= phase;
    }
    q
}
