//! Commuting operator tuples, the map `P_T(X) = Σ T_i X T_i*`, purity and the defect operator.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::json::{matrix_from_json, matrix_to_json, MatrixJson};
use crate::kernel_spaces::{monomial_count, KernelSpec, MultiIndex, TruncatedSpace};
use crate::numerics::{
    c64, hermitian_part, identity, operator_norm, orthonormal_range, psd_sqrt, random_gaussian,
    random_unitary, real, CMat, Tolerances,
};

/// Relative tolerance for the commutation check at construction.
pub const COMMUTATOR_TOL: f64 = 1e-10;
/// Slack allowed above 1 in the row-contraction test.
pub const ROW_CONTRACTION_SLACK: f64 = 1e-10;

/// `n` commuting `d x d` matrices.
#[derive(Clone, Debug, PartialEq)]
pub struct OperatorTuple {
    matrices: Vec<CMat>,
    dim: usize,
}

impl OperatorTuple {
    /// Validates shapes and commutativity:
    /// `max ||T_i T_j - T_j T_i|| <= 1e-10 * max(1, max ||T_i||^2)`.
    pub fn new(matrices: Vec<CMat>) -> Result<Self> {
        if matrices.is_empty() {
            return Err(Error::EmptyInput("an operator tuple needs at least one matrix"));
        }
        let dim = matrices[0].nrows();
        for (i, m) in matrices.iter().enumerate() {
            if m.shape() != (dim, dim) {
                return Err(Error::DimensionMismatch(format!(
                    "T_{} is {}x{}, expected {dim}x{dim}",
                    i + 1,
                    m.nrows(),
                    m.ncols()
                )));
            }
        }
        let residual = commutator_residual(&matrices);
        let scale = matrices
            .iter()
            .map(|m| operator_norm(m).powi(2))
            .fold(1.0, f64::max);
        if residual > COMMUTATOR_TOL * scale {
            return Err(Error::NotCommuting {
                residual: residual / scale,
            });
        }
        Ok(Self { matrices, dim })
    }

    /// The compressed multiplication tuple `(P_N M_{z_1}, …, P_N M_{z_n})` of a truncated space.
    pub fn compressed_shift(space: &TruncatedSpace) -> Self {
        let matrices = (0..space.n())
            .map(|i| space.multiplication_matrix(i).expect("index in range"))
            .collect();
        Self {
            matrices,
            dim: space.dim(),
        }
    }

    pub fn zero(n: usize, dim: usize) -> Self {
        Self {
            matrices: vec![CMat::zeros(dim, dim); n],
            dim,
        }
    }

    pub fn n(&self) -> usize {
        self.matrices.len()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn matrices(&self) -> &[CMat] {
        &self.matrices
    }

    pub fn get(&self, i: usize) -> &CMat {
        &self.matrices[i]
    }

    pub fn scaled(&self, c: f64) -> Self {
        Self {
            matrices: self.matrices.iter().map(|m| m * real(c)).collect(),
            dim: self.dim,
        }
    }

    /// `(T*)^k = Π_i (T_i*)^{k_i}`; the order is irrelevant since the tuple commutes.
    pub fn adjoint_power(&self, k: &MultiIndex) -> CMat {
        let mut out = identity(self.dim);
        for (i, &ki) in k.exponents().iter().enumerate() {
            let adj = self.matrices[i].adjoint();
            for _ in 0..ki {
                out = &adj * out;
            }
        }
        out
    }

    /// `Σ T_i X T_i*`.
    pub fn apply_pt(&self, x: &CMat) -> Result<CMat> {
        if x.shape() != (self.dim, self.dim) {
            return Err(Error::DimensionMismatch(format!(
                "P_T acts on {0}x{0} matrices, got {1}x{2}",
                self.dim,
                x.nrows(),
                x.ncols()
            )));
        }
        let mut out = CMat::zeros(self.dim, self.dim);
        for t in &self.matrices {
            out += t * x * t.adjoint();
        }
        Ok(out)
    }

    /// `||P_T(I)||`.
    pub fn row_norm(&self) -> f64 {
        operator_norm(&self.apply_pt(&identity(self.dim)).expect("square identity"))
    }

    /// `(row_norm <= 1 + 1e-10, row_norm)`.
    pub fn is_row_contraction(&self) -> (bool, f64) {
        let r = self.row_norm();
        (r <= 1.0 + ROW_CONTRACTION_SLACK, r)
    }

    fn require_row_contraction(&self) -> Result<()> {
        match self.is_row_contraction() {
            (true, _) => Ok(()),
            (false, row_norm) => Err(Error::NotRowContraction { row_norm }),
        }
    }

    /// `||P_T^m(I)||` for `m = 1..=m_max`.
    pub fn purity_residuals(&self, m_max: usize) -> Result<Vec<f64>> {
        self.require_row_contraction()?;
        let mut x = identity(self.dim);
        let mut out = Vec::with_capacity(m_max);
        for _ in 0..m_max {
            x = hermitian_part(&self.apply_pt(&x)?);
            out.push(operator_norm(&x));
        }
        Ok(out)
    }

    /// `||P_T^{m}(I)||` for a single power, zero for `m` past a vanishing iterate.
    pub fn purity_residual_at(&self, m: usize) -> Result<f64> {
        if m == 0 {
            return Ok(if self.dim == 0 { 0.0 } else { 1.0 });
        }
        Ok(*self.purity_residuals(m)?.last().expect("m > 0"))
    }

    /// Declared pure when `||P_T^{m_max}(I)|| < residual_tol`.
    pub fn is_pure(&self, m_max: usize, tol: &Tolerances) -> Result<bool> {
        Ok(self.purity_residual_at(m_max)? < tol.residual_tol)
    }

    /// Defect operator `D = (I - P_T(I))^{1/2}` and an orthonormal basis of its range.
    pub fn defect(&self, tol: &Tolerances) -> Result<DefectData> {
        self.require_row_contraction()?;
        let x = hermitian_part(&(identity(self.dim) - self.apply_pt(&identity(self.dim))?));
        let d = psd_sqrt(&x, tol)?;
        let basis = orthonormal_range(&x, tol);
        Ok(DefectData {
            defect_dim: basis.ncols(),
            d,
            basis,
        })
    }

    /// `b* T_i b` for orthonormal columns `b`: the restriction to an invariant subspace.
    pub fn compress(&self, b: &CMat) -> Result<OperatorTuple> {
        if b.nrows() != self.dim {
            return Err(Error::DimensionMismatch(format!(
                "basis has {} rows, tuple acts on C^{}",
                b.nrows(),
                self.dim
            )));
        }
        let matrices: Vec<CMat> = self.matrices.iter().map(|t| b.adjoint() * t * b).collect();
        Ok(Self {
            dim: b.ncols(),
            matrices,
        })
    }

    pub fn to_file(&self) -> TupleFile {
        TupleFile {
            n: self.n(),
            dim: self.dim,
            matrices: self.matrices.iter().map(matrix_to_json).collect(),
        }
    }

    pub fn from_file(file: &TupleFile) -> Result<Self> {
        if file.matrices.len() != file.n {
            return Err(Error::Format(format!(
                "header says n = {} but {} matrices follow",
                file.n,
                file.matrices.len()
            )));
        }
        let matrices = file
            .matrices
            .iter()
            .map(|m| matrix_from_json(m, Some(file.dim)))
            .collect::<Result<Vec<_>>>()?;
        for m in &matrices {
            if m.shape() != (file.dim, file.dim) {
                return Err(Error::Format(format!(
                    "matrix is {}x{}, header says dim = {}",
                    m.nrows(),
                    m.ncols(),
                    file.dim
                )));
            }
        }
        Self::new(matrices)
    }
}

/// `max_{i<j} ||T_i T_j - T_j T_i||`.
pub fn commutator_residual(matrices: &[CMat]) -> f64 {
    let mut worst: f64 = 0.0;
    for i in 0..matrices.len() {
        for j in i + 1..matrices.len() {
            let c = &matrices[i] * &matrices[j] - &matrices[j] * &matrices[i];
            worst = worst.max(operator_norm(&c));
        }
    }
    worst
}

/// On-disk tuple format.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TupleFile {
    pub n: usize,
    pub dim: usize,
    pub matrices: Vec<MatrixJson>,
}

#[derive(Clone, Debug)]
pub struct DefectData {
    /// `(I - P_T(I))^{1/2}`.
    pub d: CMat,
    /// Orthonormal columns spanning the range of `I - P_T(I)`.
    pub basis: CMat,
    pub defect_dim: usize,
}

/// Random commuting tuple on `C^d` with `||P_T(I)|| = scale`, hence pure.
///
/// Each `T_i` is a random combination of the compressed Drury-Arveson shifts on the
/// first `d` graded monomials, plus a random multiple of the identity, conjugated by
/// a random unitary. The first `d` monomials form a lower set, so that compression
/// is co-invariant and the shifts commute exactly.
pub fn random_pure_tuple(n: usize, d: usize, seed: u64, scale: f64) -> Result<OperatorTuple> {
    if !(scale > 0.0 && scale < 1.0) {
        return Err(Error::InvalidArgument(format!(
            "scale must lie in (0, 1), got {scale}"
        )));
    }
    random_row_contraction(n, d, seed, scale)
}

/// Same construction as [`random_pure_tuple`] but any `scale` in `(0, 1]` is accepted.
pub fn random_row_contraction(n: usize, d: usize, seed: u64, scale: f64) -> Result<OperatorTuple> {
    if n == 0 || d == 0 {
        return Err(Error::InvalidArgument("n and d must be positive".into()));
    }
    if !(scale > 0.0 && scale <= 1.0) {
        return Err(Error::InvalidArgument(format!(
            "scale must lie in (0, 1], got {scale}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut degree = 0;
    while monomial_count(n, degree) < d {
        degree += 1;
    }
    let space = TruncatedSpace::scalar(KernelSpec::drury_arveson(n), degree)?;
    let shifts: Vec<CMat> = (0..n)
        .map(|i| {
            space
                .multiplication_matrix(i)
                .expect("index in range")
                .view((0, 0), (d, d))
                .into_owned()
        })
        .collect();
    let mix = random_gaussian(n, n, &mut rng);
    let shifts_on_diag = random_gaussian(n, 1, &mut rng);
    let u = random_unitary(d, &mut rng);
    let mut matrices: Vec<CMat> = (0..n)
        .map(|i| {
            let mut t = identity(d) * shifts_on_diag[i] * real(0.5);
            for (j, s) in shifts.iter().enumerate() {
                t += s * mix[(i, j)];
            }
            &u * t * u.adjoint()
        })
        .collect();
    let probe = OperatorTuple {
        matrices: matrices.clone(),
        dim: d,
    };
    let r = probe.row_norm();
    let factor = (scale / r).sqrt();
    for m in &mut matrices {
        *m *= real(factor);
    }
    OperatorTuple::new(matrices)
}

/// Commuting tuple `T_i = Q diag(e^{iθ_{ij}}) Q* / sqrt(n)` with `P_T(I) = I`; never pure.
pub fn random_unitary_tuple(n: usize, d: usize, seed: u64) -> Result<OperatorTuple> {
    if n == 0 || d == 0 {
        return Err(Error::InvalidArgument("n and d must be positive".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let q = random_unitary(d, &mut rng);
    let phases = random_gaussian(n, d, &mut rng);
    let matrices = (0..n)
        .map(|i| {
            let diag = CMat::from_fn(d, d, |r, c| {
                if r == c {
                    let theta = phases[(i, r)].re;
                    c64(theta.cos(), theta.sin()) / (n as f64).sqrt()
                } else {
                    real(0.0)
                }
            });
            &q * diag * q.adjoint()
        })
        .collect();
    OperatorTuple::new(matrices)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn shift2() -> OperatorTuple {
        let mut t = CMat::zeros(2, 2);
        t[(1, 0)] = real(1.0);
        OperatorTuple::new(vec![t]).unwrap()
    }

    fn min_eig(x: &CMat) -> f64 {
        crate::numerics::min_eigenvalue(x)
    }

    #[test]
    fn rejects_non_commuting() {
        let mut a = CMat::zeros(2, 2);
        a[(0, 1)] = real(1.0);
        let b = a.adjoint();
        assert!(matches!(OperatorTuple::new(vec![a, b]), Err(Error::NotCommuting { .. })));
        assert!(OperatorTuple::new(vec![]).is_err());
        assert!(OperatorTuple::new(vec![CMat::zeros(2, 2), CMat::zeros(3, 3)]).is_err());
    }

    #[test]
    fn pt_examples() {
        let z = OperatorTuple::zero(2, 3);
        let x = random_gaussian(3, 3, &mut ChaCha8Rng::seed_from_u64(1));
        assert_eq!(z.apply_pt(&x).unwrap(), CMat::zeros(3, 3));

        let out = shift2().apply_pt(&identity(2)).unwrap();
        let expected = CMat::from_diagonal(&nalgebra::DVector::from_vec(vec![real(0.0), real(1.0)]));
        assert!((out - expected).norm() < 1e-15);

        // n=2, N=1: weights are all one, so P_T(I) projects onto span{z_1, z_2}
        let space = TruncatedSpace::scalar(KernelSpec::drury_arveson(2), 1).unwrap();
        let t = OperatorTuple::compressed_shift(&space);
        let p = t.apply_pt(&identity(3)).unwrap();
        let expected = CMat::from_diagonal(&nalgebra::DVector::from_vec(vec![real(0.0), real(1.0), real(1.0)]));
        assert!((p - expected).norm() < 1e-15);
        assert!(t.apply_pt(&identity(2)).is_err());
    }

    #[test]
    fn row_contraction_examples() {
        assert_eq!(OperatorTuple::zero(2, 2).is_row_contraction(), (true, 0.0));
        let u = OperatorTuple::new(vec![random_unitary(3, &mut ChaCha8Rng::seed_from_u64(3))]).unwrap();
        let (ok, r) = u.is_row_contraction();
        assert!(ok && (r - 1.0).abs() < 1e-12);
        let big = OperatorTuple::new(vec![identity(1) * real(1.1)]).unwrap();
        let (ok, r) = big.is_row_contraction();
        assert!(!ok && (r - 1.21).abs() < 1e-14);
        assert!(matches!(big.purity_residuals(3), Err(Error::NotRowContraction { .. })));
    }

    #[test]
    fn purity_examples() {
        for (n, deg) in [(1, 3), (2, 2), (3, 2)] {
            let space = TruncatedSpace::scalar(KernelSpec::new(n, 2.0).unwrap(), deg).unwrap();
            let t = OperatorTuple::compressed_shift(&space);
            let res = t.purity_residuals(deg + 3).unwrap();
            assert!(res[..deg].iter().all(|r| *r > 0.0));
            assert!(res[deg..].iter().all(|r| *r == 0.0));
        }
        let u = OperatorTuple::new(vec![random_unitary(2, &mut ChaCha8Rng::seed_from_u64(9))]).unwrap();
        assert!(u.purity_residuals(5).unwrap().iter().all(|r| (r - 1.0).abs() < 1e-12));

        // 0.5 * shift on a degree-10 truncation: residual at m is 0.25^m times a bounded factor
        let space = TruncatedSpace::scalar(KernelSpec::drury_arveson(2), 10).unwrap();
        let t = OperatorTuple::compressed_shift(&space).scaled(0.5);
        let res = t.purity_residuals(40).unwrap();
        assert!(*res.last().unwrap() < 1e-6);
        assert!(res.windows(2).all(|w| w[1] <= w[0] + 1e-12));
    }

    #[test]
    fn defect_examples() {
        let tol = Tolerances::default();
        let z = OperatorTuple::zero(2, 3).defect(&tol).unwrap();
        assert_eq!(z.defect_dim, 3);
        assert!((z.d - identity(3)).norm() < 1e-14);

        let s = shift2().defect(&tol).unwrap();
        assert_eq!(s.defect_dim, 1);
        let expected = CMat::from_diagonal(&nalgebra::DVector::from_vec(vec![real(1.0), real(0.0)]));
        assert!((s.d - expected).norm() < 1e-14);

        let u = OperatorTuple::new(vec![random_unitary(3, &mut ChaCha8Rng::seed_from_u64(4))])
            .unwrap()
            .defect(&tol)
            .unwrap();
        assert_eq!(u.defect_dim, 0);
        assert!(u.d.norm() < 1e-7);
    }

    #[test]
    fn random_tuples() {
        for seed in 0..10 {
            let t = random_pure_tuple(3, 6, seed, 0.5).unwrap();
            assert_eq!(t, random_pure_tuple(3, 6, seed, 0.5).unwrap());
            let (ok, r) = t.is_row_contraction();
            assert!(ok && (r - 0.5).abs() < 1e-12);
            let res = t.purity_residuals(200).unwrap();
            assert!(res.iter().any(|r| *r < 1e-6));
        }
        assert_ne!(random_pure_tuple(2, 4, 1, 0.5).unwrap(), random_pure_tuple(2, 4, 2, 0.5).unwrap());
        assert!(random_pure_tuple(2, 4, 1, 1.0).is_err());

        let u = random_unitary_tuple(2, 4, 7).unwrap();
        assert!((u.apply_pt(&identity(4)).unwrap() - identity(4)).norm() < 1e-12);
        assert!(!u.is_pure(50, &Tolerances::default()).unwrap());
    }

    #[test]
    fn pt_preserves_positivity_and_is_monotone() {
        let t = random_pure_tuple(2, 5, 11, 0.9).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let g = random_gaussian(5, 5, &mut rng);
        let x = &g * g.adjoint();
        assert!(min_eig(&t.apply_pt(&x).unwrap()) >= -1e-10);
        let mut prev = identity(5);
        for _ in 0..10 {
            let next = t.apply_pt(&prev).unwrap();
            assert!(min_eig(&(&prev - &next)) >= -1e-10);
            prev = next;
        }
    }

    #[test]
    fn tuple_file_round_trip() {
        let t = random_pure_tuple(2, 3, 5, 0.7).unwrap();
        let text = serde_json::to_string(&t.to_file()).unwrap();
        let back = OperatorTuple::from_file(&serde_json::from_str(&text).unwrap()).unwrap();
        assert_eq!(back, t);
        let mut bad = t.to_file();
        bad.n = 3;
        assert!(OperatorTuple::from_file(&bad).is_err());
    }
}
