//! Joint invariant subspaces, wandering subspaces and partially isometric
//! representations `Π: H²_n ⊗ E → H` with range `S`.
//!
//! Truncated multiplication tuples are only invariant-preserving away from the top
//! degree, so every tuple is paired with a domain on which it acts faithfully (see
//! [`TupleAction`]). For genuine tuples the domain is the whole space.

use crate::dilation::canonical_dilation;
use crate::error::{Error, Result};
use crate::json::{matrix_from_json, matrix_to_json, MatrixJson};
use crate::kernel_spaces::{monomial_count, KernelAugmentedSpace, MultiIndex, TruncatedSpace};
use crate::numerics::{
    hstack, identity, operator_norm, orthonormal_range, partial_isometry_defect, principal_angle_gap,
    subspace_intersection, lstsq_intertwiner, CMat, Tolerances,
};
use crate::row_contractions::OperatorTuple;

/// Closed subspace of `C^d`, stored by orthonormal columns.
#[derive(Clone, Debug, PartialEq)]
pub struct Subspace {
    basis: CMat,
}

impl Subspace {
    /// Accepts a basis whose columns are orthonormal within `1e-12`.
    pub fn new(basis: CMat) -> Result<Self> {
        let defect = operator_norm(&(basis.adjoint() * &basis - identity(basis.ncols())));
        if defect > 1e-12 {
            return Err(Error::InvalidArgument(format!(
                "basis columns are not orthonormal (defect {defect:e})"
            )));
        }
        Ok(Self { basis })
    }

    /// Orthonormalized span of the columns of `a`.
    pub fn span(a: &CMat, tol: &Tolerances) -> Self {
        Self {
            basis: orthonormal_range(a, tol),
        }
    }

    pub fn full(d: usize) -> Self {
        Self { basis: identity(d) }
    }

    pub fn zero(d: usize) -> Self {
        Self {
            basis: CMat::zeros(d, 0),
        }
    }

    /// Span of the first `p` coordinate vectors.
    pub fn coordinate_prefix(d: usize, p: usize) -> Self {
        Self {
            basis: identity(d).columns(0, p.min(d)).into_owned(),
        }
    }

    pub fn ambient_dim(&self) -> usize {
        self.basis.nrows()
    }

    pub fn dim(&self) -> usize {
        self.basis.ncols()
    }

    pub fn basis(&self) -> &CMat {
        &self.basis
    }

    pub fn projector(&self) -> CMat {
        &self.basis * self.basis.adjoint()
    }

    /// `||P_self - P_other||`.
    pub fn gap(&self, other: &Subspace) -> Result<f64> {
        principal_angle_gap(&self.basis, &other.basis)
    }

    pub fn intersection(&self, other: &Subspace) -> Result<Subspace> {
        Ok(Self {
            basis: subspace_intersection(&self.basis, &other.basis)?,
        })
    }

    /// Orthogonal complement of `other` inside `self`.
    pub fn minus(&self, other: &Subspace, tol: &Tolerances) -> Result<Subspace> {
        check_ambient(self.ambient_dim(), other.ambient_dim())?;
        let residual = &self.basis - &other.basis * (other.basis.adjoint() * &self.basis);
        Ok(Self::span(&residual, tol))
    }

    /// `||(I - P_other) P_self||`: zero iff `self ⊆ other`.
    pub fn excess_over(&self, other: &Subspace) -> Result<f64> {
        check_ambient(self.ambient_dim(), other.ambient_dim())?;
        let residual = &self.basis - &other.basis * (other.basis.adjoint() * &self.basis);
        Ok(operator_norm(&residual))
    }

    pub fn to_json(&self) -> MatrixJson {
        matrix_to_json(&self.basis)
    }

    pub fn from_json(rows: &MatrixJson) -> Result<Self> {
        Self::new(matrix_from_json(rows, None)?)
    }
}

fn check_ambient(a: usize, b: usize) -> Result<()> {
    if a != b {
        return Err(Error::DimensionMismatch(format!(
            "subspaces of C^{a} and C^{b}"
        )));
    }
    Ok(())
}

/// A commuting tuple together with the subspace `D` on which it is trusted.
///
/// Invariance is tested as `T_i(S ∩ D) ⊆ S`, wandering subspaces are
/// `S ⊖ Σ T_i (S ∩ D)`. For the compression of `M_z` to polynomials of degree ≤ N,
/// `D` is the degree ≤ N−1 part, where the compression still multiplies exactly.
#[derive(Clone, Debug)]
pub struct TupleAction {
    tuple: OperatorTuple,
    domain: Subspace,
}

impl TupleAction {
    /// The tuple acting on its whole space.
    pub fn full(tuple: OperatorTuple) -> Self {
        let domain = Subspace::full(tuple.dim());
        Self { tuple, domain }
    }

    pub fn with_domain(tuple: OperatorTuple, domain: Subspace) -> Result<Self> {
        check_ambient(tuple.dim(), domain.ambient_dim())?;
        Ok(Self { tuple, domain })
    }

    /// Compressed multiplication tuple on a truncated space, trusted below the top degree.
    pub fn graded_shift(space: &TruncatedSpace) -> Self {
        Self {
            tuple: OperatorTuple::compressed_shift(space),
            domain: Subspace::coordinate_prefix(space.dim(), space.interior_dim()),
        }
    }

    /// Compressed multiplication tuple on `P_N ⊕ span{tail of K_a}`; exact everywhere.
    pub fn augmented_shift(space: &KernelAugmentedSpace) -> Self {
        let matrices = (0..space.n())
            .map(|i| space.multiplication_matrix(i).expect("index in range"))
            .collect();
        Self::full(OperatorTuple::new(matrices).expect("compressions of M_z to a co-invariant space commute"))
    }

    pub fn tuple(&self) -> &OperatorTuple {
        &self.tuple
    }

    pub fn domain(&self) -> &Subspace {
        &self.domain
    }

    pub fn dim(&self) -> usize {
        self.tuple.dim()
    }

    fn check(&self, s: &Subspace) -> Result<()> {
        check_ambient(self.dim(), s.ambient_dim())
    }

    /// Orthonormal basis of `S ∩ D`.
    fn trusted_part(&self, s: &Subspace) -> Result<CMat> {
        if self.domain.dim() == self.dim() {
            return Ok(s.basis.clone());
        }
        Ok(s.intersection(&self.domain)?.basis)
    }

    /// `[T_1 Q | … | T_n Q]`.
    fn images(&self, q: &CMat) -> CMat {
        let blocks: Vec<CMat> = self.tuple.matrices().iter().map(|t| t * q).collect();
        hstack(&blocks, self.dim())
    }
}

/// `max_i ||(I - P_S) T_i Q||` with `Q` a basis of `S ∩ D`; invariant iff below `residual_tol`.
pub fn is_invariant(s: &Subspace, action: &TupleAction, tol: &Tolerances) -> Result<(bool, f64)> {
    action.check(s)?;
    let q = action.trusted_part(s)?;
    let mut worst: f64 = 0.0;
    for t in action.tuple.matrices() {
        let tq = t * &q;
        let outside = &tq - &s.basis * (s.basis.adjoint() * &tq);
        worst = worst.max(operator_norm(&outside));
    }
    Ok((worst <= tol.residual_tol, worst))
}

fn require_invariant(s: &Subspace, action: &TupleAction, tol: &Tolerances) -> Result<()> {
    match is_invariant(s, action, tol)? {
        (true, _) => Ok(()),
        (false, residual) => Err(Error::NotInvariant { residual }),
    }
}

/// `W = S ⊖ Σ_i T_i (S ∩ D)`.
pub fn wandering_subspace(s: &Subspace, action: &TupleAction, tol: &Tolerances) -> Result<Subspace> {
    require_invariant(s, action, tol)?;
    let q = action.trusted_part(s)?;
    let moved = Subspace::span(&action.images(&q), tol);
    s.minus(&moved, tol)
}

/// `max ||W* T^k W||` over `1 <= |k| <= max_degree`: zero for a wandering subspace.
pub fn wandering_defect(w: &Subspace, t: &OperatorTuple, max_degree: usize) -> Result<f64> {
    check_ambient(t.dim(), w.ambient_dim())?;
    let mut worst: f64 = 0.0;
    let mut images: std::collections::BTreeMap<MultiIndex, CMat> = Default::default();
    for k in MultiIndex::up_to(t.n(), max_degree) {
        let img = match k.predecessor() {
            None => w.basis.clone(),
            Some((i, prev)) => t.get(i) * &images[&prev],
        };
        if k.degree() > 0 {
            worst = worst.max(operator_norm(&(w.basis.adjoint() * &img)));
        }
        images.insert(k, img);
    }
    Ok(worst)
}

/// Smallest subspace containing `W` and closed under `T_i` on the trusted domain.
///
/// The dimension grows strictly until it stabilizes, so at most `dim + 1` rounds run.
pub fn generated_subspace(w: &Subspace, action: &TupleAction, tol: &Tolerances) -> Result<Subspace> {
    action.check(w)?;
    let mut g = w.clone();
    for _ in 0..=action.dim() {
        let q = action.trusted_part(&g)?;
        let next = Subspace::span(&hstack(&[g.basis.clone(), action.images(&q)], action.dim()), tol);
        if next.dim() == g.dim() {
            return Ok(g);
        }
        g = next;
    }
    Ok(g)
}

/// `{f : f(a) = 0}` in a scalar truncated space: the complement of the evaluation vector.
pub fn zero_based_subspace(space: &TruncatedSpace, a: &[num_complex::Complex64], tol: &Tolerances) -> Result<Subspace> {
    let v = space.point_evaluation_vector(a)?;
    let line = Subspace::span(&CMat::from_column_slice(v.len(), 1, v.as_slice()), tol);
    Subspace::full(space.dim()).minus(&line, tol)
}

/// `{f : f(a) = 0} = H ⊖ K_a` in the kernel-augmented model.
pub fn zero_based_subspace_augmented(space: &KernelAugmentedSpace, tol: &Tolerances) -> Result<Subspace> {
    let k = space.kernel_vector();
    let line = Subspace::span(&CMat::from_column_slice(k.len(), 1, k.as_slice()), tol);
    Subspace::full(space.dim()).minus(&line, tol)
}

/// A map `Π` from the degree-`N_cut` truncation of `H²_n ⊗ C^e` into `C^d`,
/// with columns ordered monomial-major, fiber-minor.
#[derive(Clone, Debug, PartialEq)]
pub struct RepresentationMap {
    matrix: CMat,
    n: usize,
    fiber_dim: usize,
    degree_cut: usize,
}

impl RepresentationMap {
    pub fn new(matrix: CMat, n: usize, fiber_dim: usize, degree_cut: usize) -> Result<Self> {
        let expected = monomial_count(n, degree_cut) * fiber_dim;
        if matrix.ncols() != expected {
            return Err(Error::MalformedRepresentation(format!(
                "matrix has {} columns, a degree-{degree_cut} truncation in {n} variables with fiber {fiber_dim} has {expected}",
                matrix.ncols()
            )));
        }
        Ok(Self {
            matrix,
            n,
            fiber_dim,
            degree_cut,
        })
    }

    pub fn matrix(&self) -> &CMat {
        &self.matrix
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn fiber_dim(&self) -> usize {
        self.fiber_dim
    }

    pub fn degree_cut(&self) -> usize {
        self.degree_cut
    }

    pub fn ambient_dim(&self) -> usize {
        self.matrix.nrows()
    }

    fn monomials(&self) -> usize {
        monomial_count(self.n, self.degree_cut)
    }

    /// Column block `Π_k: C^e → C^d` for the `idx`-th monomial.
    fn block(&self, idx: usize) -> CMat {
        self.matrix
            .columns(idx * self.fiber_dim, self.fiber_dim)
            .into_owned()
    }

    pub fn range(&self, tol: &Tolerances) -> Subspace {
        Subspace::span(&self.matrix, tol)
    }

    /// `||Π Π* Π - Π||`.
    pub fn partial_isometry_defect(&self) -> f64 {
        partial_isometry_defect(&self.matrix)
    }

    /// `max_i ||Π M_{z_i} - T_i Π||` over the columns below the top degree.
    pub fn intertwining_residual(&self, t: &OperatorTuple) -> Result<f64> {
        if t.n() != self.n || t.dim() != self.ambient_dim() {
            return Err(Error::DimensionMismatch(format!(
                "representation into C^{} in {} variables, tuple of {} on C^{}",
                self.ambient_dim(),
                self.n,
                t.n(),
                t.dim()
            )));
        }
        let space = TruncatedSpace::new(
            crate::kernel_spaces::KernelSpec::drury_arveson(self.n),
            self.degree_cut,
            self.fiber_dim,
        )?;
        let keep = space.interior_dim();
        let mut worst: f64 = 0.0;
        for i in 0..self.n {
            let m = space.multiplication_matrix(i)?;
            let lhs = &self.matrix * m.columns(0, keep);
            let rhs = t.get(i) * self.matrix.columns(0, keep);
            worst = worst.max(operator_norm(&(lhs - rhs)));
        }
        Ok(worst)
    }

    /// `Π (I ⊗ V)` for `V: C^{e'} → C^e`.
    pub fn compose_fiber(&self, v: &CMat) -> Result<Self> {
        if v.nrows() != self.fiber_dim {
            return Err(Error::DimensionMismatch(format!(
                "fiber map has {} rows, fiber dimension is {}",
                v.nrows(),
                self.fiber_dim
            )));
        }
        let blocks: Vec<CMat> = (0..self.monomials()).map(|j| self.block(j) * v).collect();
        Self::new(hstack(&blocks, self.ambient_dim()), self.n, v.ncols(), self.degree_cut)
    }
}

/// Canonical representation of an invariant subspace: `Π = i_S ∘ Π_S*`, where `Π_S`
/// is the canonical dilation of the restriction `T|_S = b* T b`.
///
/// The restriction has to be a genuine one, so invariance is checked under the full
/// tuple regardless of the action's trusted domain.
pub fn representation_via_dilation(
    s: &Subspace,
    action: &TupleAction,
    n_cut: usize,
    tol: &Tolerances,
) -> Result<RepresentationMap> {
    let full = TupleAction::full(action.tuple.clone());
    require_invariant(s, &full, tol)?;
    let restricted = action.tuple.compress(&s.basis)?;
    let pi_s = canonical_dilation(&restricted, n_cut, tol)?;
    let matrix = &s.basis * pi_s.coordinate_matrix().adjoint();
    RepresentationMap::new(matrix, action.tuple.n(), pi_s.fiber_dim(), n_cut)
}

/// `W = Π((ker Π)^⊥ ∩ E)`, with `E` the constant functions of the domain.
pub fn wandering_from_representation(pi: &RepresentationMap, tol: &Tolerances) -> Result<Subspace> {
    let d = pi.ambient_dim();
    if pi.fiber_dim == 0 || pi.matrix.ncols() == 0 {
        return Ok(Subspace::zero(d));
    }
    let cols = pi.matrix.ncols();
    let kernel_complement = orthonormal_range(&pi.matrix.adjoint(), tol);
    let constants = identity(cols).columns(0, pi.fiber_dim).into_owned();
    let f = subspace_intersection(&kernel_complement, &constants)?;
    Ok(Subspace::span(&(&pi.matrix * f), tol))
}

/// Recovers `V: E_1 → E_2` with `Π_1 = Π_2 (I ⊗ V)` by least squares over all monomial blocks.
pub fn compare_representations(
    pi1: &RepresentationMap,
    pi2: &RepresentationMap,
    tol: &Tolerances,
) -> Result<crate::dilation::FiberMap> {
    if pi1.n != pi2.n || pi1.degree_cut != pi2.degree_cut || pi1.ambient_dim() != pi2.ambient_dim() {
        return Err(Error::DimensionMismatch(format!(
            "representations differ in (n, degree_cut, ambient): ({}, {}, {}) vs ({}, {}, {})",
            pi1.n,
            pi1.degree_cut,
            pi1.ambient_dim(),
            pi2.n,
            pi2.degree_cut,
            pi2.ambient_dim()
        )));
    }
    let gap = pi1.range(tol).gap(&pi2.range(tol))?;
    if gap > tol.residual_tol {
        return Err(Error::RangeMismatch { gap });
    }
    if pi2.fiber_dim == 0 {
        return Ok(crate::dilation::FiberMap {
            map: CMat::zeros(0, pi1.fiber_dim),
            residual: operator_norm(&pi1.matrix),
        });
    }
    // V* Π_2k* = Π_1k* for every monomial k
    let blocks_in: Vec<CMat> = (0..pi2.monomials()).map(|j| pi2.block(j).adjoint()).collect();
    let blocks_out: Vec<CMat> = (0..pi1.monomials()).map(|j| pi1.block(j).adjoint()).collect();
    let sol = lstsq_intertwiner(&blocks_in, &blocks_out, tol)?;
    Ok(crate::dilation::FiberMap {
        map: sol.solution.adjoint(),
        residual: sol.residual,
    })
}
