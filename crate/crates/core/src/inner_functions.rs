//! Polynomial multipliers `Θ(z) = Σ A_k z^k` from `H²_n ⊗ E` into `H(K_λ) ⊗ E_*`:
//! K-inner tests, multiplier norms, quasi-homogeneous block norms, the wandering
//! data of a partially isometric multiplier, and the non-closed-range probe.

use std::collections::{BTreeMap, HashMap};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::json::{coefficients_from_json, coefficients_to_json};
use crate::kernel_spaces::{KernelSpec, MultiIndex, TruncatedSpace};
use crate::numerics::{
    hermitian_eigen, hermitian_part, identity, operator_norm, orthogonal_complement, orthonormal_range,
    partial_isometry_defect, real, select_columns, singular_values, subspace_intersection, CMat, Tolerances,
};

/// Default bound on the weights searched by [`quasi_homogeneous_decompose`].
pub const DEFAULT_WEIGHT_BOUND: u32 = 12;
/// Eigenvalues within this distance of 1 count as 1 when extracting `F`.
pub const EIGENSPACE_TOL: f64 = 1e-8;

/// `Θ(z) = Σ_k A_k z^k` with `A_k: C^e → C^{e*}`.
#[derive(Clone, Debug, PartialEq)]
pub struct MatrixPolynomial {
    n: usize,
    source_dim: usize,
    target_dim: usize,
    coefficients: BTreeMap<MultiIndex, CMat>,
}

impl MatrixPolynomial {
    pub fn new(
        n: usize,
        target_dim: usize,
        source_dim: usize,
        coefficients: BTreeMap<MultiIndex, CMat>,
    ) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidArgument("ball dimension must be positive".into()));
        }
        for (k, a) in &coefficients {
            if k.n() != n {
                return Err(Error::DimensionMismatch(format!("multi-index {k} has {} entries, expected {n}", k.n())));
            }
            if a.shape() != (target_dim, source_dim) {
                return Err(Error::DimensionMismatch(format!(
                    "coefficient {k} is {}x{}, expected {target_dim}x{source_dim}",
                    a.nrows(),
                    a.ncols()
                )));
            }
        }
        Ok(Self {
            n,
            source_dim,
            target_dim,
            coefficients,
        })
    }

    /// Scalar polynomial from `(exponents, coefficient)` terms; repeated exponents add up.
    pub fn scalar(n: usize, terms: &[(Vec<u32>, Complex64)]) -> Result<Self> {
        let mut coefficients: BTreeMap<MultiIndex, CMat> = BTreeMap::new();
        for (k, c) in terms {
            let entry = coefficients
                .entry(MultiIndex::new(k.clone()))
                .or_insert_with(|| CMat::zeros(1, 1));
            entry[(0, 0)] += c;
        }
        Self::new(n, 1, 1, coefficients)
    }

    pub fn constant(n: usize, a0: CMat) -> Result<Self> {
        let (r, c) = a0.shape();
        Self::new(n, r, c, BTreeMap::from([(MultiIndex::zero(n), a0)]))
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn source_dim(&self) -> usize {
        self.source_dim
    }

    pub fn target_dim(&self) -> usize {
        self.target_dim
    }

    pub fn coefficients(&self) -> &BTreeMap<MultiIndex, CMat> {
        &self.coefficients
    }

    pub fn is_scalar(&self) -> bool {
        self.source_dim == 1 && self.target_dim == 1
    }

    /// Multi-indices with a nonzero coefficient.
    pub fn support(&self) -> Vec<&MultiIndex> {
        self.coefficients
            .iter()
            .filter(|(_, a)| a.iter().any(|x| *x != real(0.0)))
            .map(|(k, _)| k)
            .collect()
    }

    pub fn is_zero(&self) -> bool {
        self.support().is_empty()
    }

    /// Largest `|k|` with `A_k ≠ 0`; zero for the zero polynomial.
    pub fn degree(&self) -> usize {
        self.support().iter().map(|k| k.degree()).max().unwrap_or(0)
    }

    pub fn scaled(&self, c: Complex64) -> Self {
        Self {
            coefficients: self.coefficients.iter().map(|(k, a)| (k.clone(), a * c)).collect(),
            ..self.clone()
        }
    }

    /// `Θ ∘ F` for `F: C^f → C^e`.
    pub fn compose_source(&self, f: &CMat) -> Result<Self> {
        if f.nrows() != self.source_dim {
            return Err(Error::DimensionMismatch(format!(
                "source map has {} rows, source dimension is {}",
                f.nrows(),
                self.source_dim
            )));
        }
        Self::new(
            self.n,
            self.target_dim,
            f.ncols(),
            self.coefficients.iter().map(|(k, a)| (k.clone(), a * f)).collect(),
        )
    }

    pub fn to_file(&self) -> PolynomialFile {
        PolynomialFile {
            n: self.n,
            source_dim: self.source_dim,
            target_dim: self.target_dim,
            coefficients: coefficients_to_json(&self.coefficients),
        }
    }

    pub fn from_file(file: &PolynomialFile) -> Result<Self> {
        let coefficients = coefficients_from_json(&file.coefficients, file.n, file.target_dim, file.source_dim)?;
        Self::new(file.n, file.target_dim, file.source_dim, coefficients)
    }
}

/// On-disk polynomial format.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PolynomialFile {
    pub n: usize,
    pub source_dim: usize,
    pub target_dim: usize,
    pub coefficients: serde_json::Map<String, serde_json::Value>,
}

fn check_spec(theta: &MatrixPolynomial, spec: &KernelSpec) -> Result<()> {
    if theta.n != spec.n {
        return Err(Error::DimensionMismatch(format!(
            "polynomial in {} variables, space over the {}-ball",
            theta.n, spec.n
        )));
    }
    Ok(())
}

fn require_scalar(p: &MatrixPolynomial) -> Result<()> {
    if !p.is_scalar() {
        return Err(Error::InvalidArgument(format!(
            "expected a scalar polynomial, got {}x{} coefficients",
            p.target_dim, p.source_dim
        )));
    }
    Ok(())
}

/// `sqrt(Σ_k ||A_k||_F^2 w_k)`: the `H(K)` norm of `Θ·1` for scalar-column `Θ`.
pub fn hk_norm(p: &MatrixPolynomial, spec: &KernelSpec) -> f64 {
    p.coefficients
        .iter()
        .map(|(k, a)| a.norm_squared() * spec.monomial_norm_sq(k))
        .sum::<f64>()
        .sqrt()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct KInnerReport {
    pub is_inner: bool,
    /// `||Σ w_k A_k* A_k - I||`.
    pub gram_violation: f64,
    /// `max_j ||Σ_l w_{l+j} A_{l+j}* A_l||` over `1 <= |j| <= probe`.
    pub shift_violation: f64,
    pub max_violation: f64,
}

/// Checks `||Θx|| = ||x||` and `ΘE ⊥ z^j ΘE` for `1 <= |j| <= max(probe_degree, deg Θ)`.
pub fn is_k_inner(theta: &MatrixPolynomial, spec: &KernelSpec, probe_degree: usize, tol: &Tolerances) -> Result<KInnerReport> {
    check_spec(theta, spec)?;
    let e = theta.source_dim;
    let weights: HashMap<&MultiIndex, f64> = theta
        .coefficients
        .keys()
        .map(|k| (k, spec.monomial_norm_sq(k)))
        .collect();
    let mut gram = CMat::zeros(e, e);
    for (k, a) in &theta.coefficients {
        gram += a.adjoint() * a * real(weights[k]);
    }
    let gram_violation = operator_norm(&(gram - identity(e)));

    let probe = probe_degree.max(theta.degree());
    let mut shift_violation: f64 = 0.0;
    for j in MultiIndex::up_to(theta.n, probe).into_iter().skip(1) {
        let mut c = CMat::zeros(e, e);
        for (l, a) in &theta.coefficients {
            let up = l.plus(&j);
            if let Some(b) = theta.coefficients.get(&up) {
                c += b.adjoint() * a * real(spec.monomial_norm_sq(&up));
            }
        }
        shift_violation = shift_violation.max(operator_norm(&c));
    }
    let max_violation = gram_violation.max(shift_violation);
    Ok(KInnerReport {
        is_inner: max_violation <= tol.residual_tol,
        gram_violation,
        shift_violation,
        max_violation,
    })
}

/// Weights `m` and degree `ℓ` with `Σ m_i k_i = ℓ` on the support.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct QuasiHomogeneityCertificate {
    pub weights: Vec<u32>,
    pub degree: u32,
}

impl QuasiHomogeneityCertificate {
    pub fn weighted_degree(&self, k: &MultiIndex) -> u32 {
        self.weights.iter().zip(k.exponents()).map(|(m, k)| m * k).sum()
    }

    pub fn certifies(&self, p: &MatrixPolynomial) -> bool {
        self.weights.len() == p.n
            && self.weights.iter().all(|&m| m > 0)
            && p.support().iter().all(|k| self.weighted_degree(k) == self.degree)
    }
}

/// Lexicographically smallest weights in `[1, bound]^n` making `p` quasi-homogeneous.
pub fn quasi_homogeneous_decompose(p: &MatrixPolynomial, bound: u32) -> Result<Option<QuasiHomogeneityCertificate>> {
    let support = p.support();
    if support.is_empty() {
        return Err(Error::ZeroPolynomial);
    }
    if bound == 0 {
        return Ok(None);
    }
    let mut m = vec![1u32; p.n];
    loop {
        let cert = QuasiHomogeneityCertificate {
            degree: support[0].exponents().iter().zip(&m).map(|(k, w)| k * w).sum(),
            weights: m.clone(),
        };
        if support.iter().all(|k| cert.weighted_degree(k) == cert.degree) {
            return Ok(Some(cert));
        }
        // next weight vector in lexicographic order
        let mut i = p.n;
        loop {
            if i == 0 {
                return Ok(None);
            }
            i -= 1;
            if m[i] < bound {
                m[i] += 1;
                for x in &mut m[i + 1..] {
                    *x = 1;
                }
                break;
            }
        }
    }
}

fn monomials_of_weighted_degree(n: usize, weights: &[u32], level: u32) -> Vec<MultiIndex> {
    MultiIndex::up_to(n, level as usize)
        .into_iter()
        .filter(|k| weights.iter().zip(k.exponents()).map(|(m, k)| m * k).sum::<u32>() == level)
        .collect()
}

/// Norm of `M_p` from `{z^k : m·k = ℓ'} ⊂ H²_n` into `{z^j : m·j = ℓ' + ℓ} ⊂ H(K)`.
pub fn multiplier_block_norm(
    p: &MatrixPolynomial,
    spec: &KernelSpec,
    cert: &QuasiHomogeneityCertificate,
    block: u32,
) -> Result<f64> {
    require_scalar(p)?;
    check_spec(p, spec)?;
    if !cert.certifies(p) {
        return Err(Error::NotQuasiHomogeneous);
    }
    let da = KernelSpec::drury_arveson(p.n);
    let domain = monomials_of_weighted_degree(p.n, &cert.weights, block);
    let target = monomials_of_weighted_degree(p.n, &cert.weights, block + cert.degree);
    let rows: HashMap<&MultiIndex, usize> = target.iter().enumerate().map(|(i, k)| (k, i)).collect();
    let mut m = CMat::zeros(target.len(), domain.len());
    for (col, k) in domain.iter().enumerate() {
        let scale = da.monomial_norm_sq(k).sqrt();
        for (s, a) in &p.coefficients {
            let j = k.plus(s);
            if let Some(&row) = rows.get(&j) {
                m[(row, col)] += a[(0, 0)] * real(spec.monomial_norm_sq(&j).sqrt() / scale);
            }
        }
    }
    Ok(operator_norm(&m))
}

/// Matrix of `M_Θ` from degree ≤ N polynomials in `H²_n ⊗ E` to degree ≤ N + deg Θ in `H(K) ⊗ E_*`.
pub fn multiplier_matrix(theta: &MatrixPolynomial, spec: &KernelSpec, max_degree: usize) -> Result<CMat> {
    check_spec(theta, spec)?;
    let domain = TruncatedSpace::new(KernelSpec::drury_arveson(theta.n), max_degree, theta.source_dim.max(1))?;
    let target = TruncatedSpace::new(*spec, max_degree + theta.degree(), theta.target_dim.max(1))?;
    let (e, f) = (theta.source_dim, theta.target_dim);
    let mut m = CMat::zeros(target.monomials().len() * f, domain.monomials().len() * e);
    for (ci, k) in domain.monomials().iter().enumerate() {
        let wk = domain.monomial_weights()[ci];
        for (s, a) in &theta.coefficients {
            let j = k.plus(s);
            let ri = target.monomial_position(&j).expect("target degree covers the image");
            let ratio = (target.monomial_weights()[ri] / wk).sqrt();
            for b in 0..f {
                for c in 0..e {
                    m[(ri * f + b, ci * e + c)] += a[(b, c)] * real(ratio);
                }
            }
        }
    }
    Ok(m)
}

/// `||M_Θ||` restricted to polynomials of degree at most `N`.
pub fn multiplier_norm_truncated(theta: &MatrixPolynomial, spec: &KernelSpec, max_degree: usize) -> Result<f64> {
    Ok(operator_norm(&multiplier_matrix(theta, spec, max_degree)?))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NormEqualityReport {
    pub certificate: QuasiHomogeneityCertificate,
    pub hk_norm: f64,
    pub block_norms: Vec<f64>,
    pub max_block: f64,
    pub pass: bool,
    /// K-inner check of `p / ||p||`.
    pub normalized_inner: KInnerReport,
}

/// Compares `||p||_{H(K)}` with the block norms `ℓ' = 0..=block_max`.
pub fn verify_norm_equality(
    p: &MatrixPolynomial,
    spec: &KernelSpec,
    block_max: u32,
    tol: &Tolerances,
) -> Result<NormEqualityReport> {
    require_scalar(p)?;
    let certificate = quasi_homogeneous_decompose(p, DEFAULT_WEIGHT_BOUND)?.ok_or(Error::NotQuasiHomogeneous)?;
    let norm = hk_norm(p, spec);
    let block_norms = (0..=block_max)
        .map(|b| multiplier_block_norm(p, spec, &certificate, b))
        .collect::<Result<Vec<_>>>()?;
    let max_block = block_norms.iter().copied().fold(0.0, f64::max);
    let pass = (max_block - norm).abs() <= 1e-9 * norm.max(1.0);
    let normalized = p.scaled(real(1.0 / norm));
    let normalized_inner = is_k_inner(&normalized, spec, p.degree() + 1, tol)?;
    Ok(NormEqualityReport {
        certificate,
        hk_norm: norm,
        block_norms,
        max_block,
        pass,
        normalized_inner,
    })
}

/// Orthonormal basis of `F` and the generating test for a partial isometry `Π`
/// defined on a truncated `H²_n ⊗ C^e` (monomial-major columns, constants first).
#[derive(Clone, Debug)]
pub struct GeneratingTest {
    /// `F` as orthonormal columns in `C^e`.
    pub f_basis: CMat,
    /// Dimension of `(ker Π)^⊥ ∩ (H²_n ⊗ F)^⊥`; zero iff `F` is generating.
    pub obstruction_dim: usize,
}

impl GeneratingTest {
    pub fn is_generating(&self) -> bool {
        self.obstruction_dim == 0
    }
}

/// `F = {η ∈ E : Π*Π η = η}` and the criterion `(ker Π)^⊥ ∩ (H²_n ⊗ F)^⊥ = {0}`.
pub fn generating_test(pi: &CMat, fiber_dim: usize, tol: &Tolerances) -> Result<GeneratingTest> {
    let cols = pi.ncols();
    if fiber_dim == 0 || !cols.is_multiple_of(fiber_dim) {
        return Err(Error::MalformedRepresentation(format!(
            "{cols} columns do not split into fibers of dimension {fiber_dim}"
        )));
    }
    let constants = pi.columns(0, fiber_dim).into_owned();
    let gram = hermitian_part(&(constants.adjoint() * &constants));
    let eig = hermitian_eigen(&gram);
    let keep: Vec<usize> = eig
        .values
        .iter()
        .enumerate()
        .filter(|(_, l)| (**l - 1.0).abs() <= EIGENSPACE_TOL)
        .map(|(i, _)| i)
        .collect();
    let f_basis = select_columns(&eig.vectors, &keep);
    let f_perp = orthogonal_complement(&f_basis, tol);
    let blocks = cols / fiber_dim;
    let mut outside_f = CMat::zeros(cols, blocks * f_perp.ncols());
    for b in 0..blocks {
        outside_f
            .view_mut((b * fiber_dim, b * f_perp.ncols()), f_perp.shape())
            .copy_from(&f_perp);
    }
    let kernel_complement = orthonormal_range(&pi.adjoint(), tol);
    let obstruction = subspace_intersection(&kernel_complement, &outside_f)?;
    Ok(GeneratingTest {
        f_basis,
        obstruction_dim: obstruction.ncols(),
    })
}

#[derive(Clone, Debug)]
pub struct BeurlingData {
    pub f_basis: CMat,
    pub theta0: MatrixPolynomial,
    pub is_generating: bool,
    pub partial_isometry_defect: f64,
    pub inner: KInnerReport,
}

/// Wandering data of a partially isometric multiplier, validated on the degree-`N` truncation.
pub fn beurling_wandering(
    theta: &MatrixPolynomial,
    spec: &KernelSpec,
    max_degree: usize,
    tol: &Tolerances,
) -> Result<BeurlingData> {
    let m = multiplier_matrix(theta, spec, max_degree)?;
    let defect = partial_isometry_defect(&m);
    if defect > tol.residual_tol {
        return Err(Error::NotPartialIsometry { residual: defect });
    }
    let test = generating_test(&m, theta.source_dim, tol)?;
    let theta0 = theta.compose_source(&test.f_basis)?;
    let inner = is_k_inner(&theta0, spec, theta.degree() + 1, tol)?;
    Ok(BeurlingData {
        is_generating: test.is_generating(),
        f_basis: test.f_basis,
        theta0,
        partial_isometry_defect: defect,
        inner,
    })
}

/// Smallest nonzero singular value of `M_p` on degree ≤ N polynomials of `H²_n`, for each N.
pub fn non_closed_range_probe(p: &MatrixPolynomial, n_list: &[usize], tol: &Tolerances) -> Result<Vec<f64>> {
    require_scalar(p)?;
    let support = p.support();
    let deg = support.first().map(|k| k.degree()).ok_or(Error::NotHomogeneous)?;
    if deg == 0 || support.iter().any(|k| k.degree() != deg) {
        return Err(Error::NotHomogeneous);
    }
    let da = KernelSpec::drury_arveson(p.n);
    n_list
        .iter()
        .map(|&n_cut| {
            let m = multiplier_matrix(p, &da, n_cut)?;
            let sv = singular_values(&m);
            let top = sv.first().copied().unwrap_or(0.0);
            let cut = tol.rank_tol * top.max(1.0);
            Ok(sv.iter().copied().filter(|s| *s > cut).fold(f64::INFINITY, f64::min))
        })
        .collect()
}
