//! Canonical dilations `Π_c h = D (I - Σ z_i T_i*)^{-1} h` into the vector-valued
//! Drury-Arveson space, minimality, and recovery of the unitaries and isometries
//! relating different dilations of the same tuple.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::json::{coefficients_from_json, coefficients_to_json};
use crate::kernel_spaces::{KernelSpec, MultiIndex};
use crate::numerics::{
    hstack, identity, lstsq_intertwiner, numerical_rank, operator_norm, real, vstack, CMat,
    Tolerances,
};
use crate::row_contractions::OperatorTuple;

/// A map `Π: C^d → H²_n ⊗ C^e`, `(Πh)(z) = Σ_{|k| <= N_c} (c_k h) z^k`.
#[derive(Clone, Debug, PartialEq)]
pub struct DilationMap {
    n: usize,
    source_dim: usize,
    fiber_dim: usize,
    degree_cut: usize,
    coefficients: BTreeMap<MultiIndex, CMat>,
}

/// Drury-Arveson weight `||z^k||^2 = k! / |k|!`.
fn da_weight(k: &MultiIndex) -> f64 {
    1.0 / k.multinomial()
}

impl DilationMap {
    /// Builds a map from its coefficients; missing multi-indices up to `degree_cut` are zero.
    pub fn new(
        n: usize,
        source_dim: usize,
        fiber_dim: usize,
        degree_cut: usize,
        mut coefficients: BTreeMap<MultiIndex, CMat>,
    ) -> Result<Self> {
        for (k, c) in &coefficients {
            if k.n() != n || k.degree() > degree_cut {
                return Err(Error::DimensionMismatch(format!(
                    "coefficient {k} does not fit n = {n}, degree_cut = {degree_cut}"
                )));
            }
            if c.shape() != (fiber_dim, source_dim) {
                return Err(Error::DimensionMismatch(format!(
                    "coefficient {k} is {}x{}, expected {fiber_dim}x{source_dim}",
                    c.nrows(),
                    c.ncols()
                )));
            }
        }
        for k in MultiIndex::up_to(n, degree_cut) {
            coefficients
                .entry(k)
                .or_insert_with(|| CMat::zeros(fiber_dim, source_dim));
        }
        Ok(Self {
            n,
            source_dim,
            fiber_dim,
            degree_cut,
            coefficients,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn source_dim(&self) -> usize {
        self.source_dim
    }

    pub fn fiber_dim(&self) -> usize {
        self.fiber_dim
    }

    pub fn degree_cut(&self) -> usize {
        self.degree_cut
    }

    /// The target is always the Drury-Arveson space.
    pub fn target_spec(&self) -> KernelSpec {
        KernelSpec::drury_arveson(self.n)
    }

    pub fn coefficients(&self) -> &BTreeMap<MultiIndex, CMat> {
        &self.coefficients
    }

    pub fn coefficient(&self, k: &MultiIndex) -> Option<&CMat> {
        self.coefficients.get(k)
    }

    /// Block `sqrt(w_k) c_k` of `Π` in orthonormal coordinates.
    pub fn coordinate_block(&self, k: &MultiIndex) -> CMat {
        &self.coefficients[k] * real(da_weight(k).sqrt())
    }

    pub fn coordinate_blocks(&self) -> Vec<CMat> {
        self.coefficients
            .keys()
            .map(|k| self.coordinate_block(k))
            .collect()
    }

    /// `Π` as a matrix into the degree-`N_c` truncation of `H²_n ⊗ C^e`
    /// (graded order, monomial-major, fiber-minor).
    pub fn coordinate_matrix(&self) -> CMat {
        vstack(&self.coordinate_blocks(), self.source_dim)
    }

    /// `||Π*Π - I||`.
    pub fn isometry_defect(&self) -> f64 {
        let mut gram = CMat::zeros(self.source_dim, self.source_dim);
        for k in self.coefficients.keys() {
            let b = self.coordinate_block(k);
            gram += b.adjoint() * b;
        }
        operator_norm(&(gram - identity(self.source_dim)))
    }

    /// `max_i ||M_{z_i}* Π - Π T_i*||` on the truncation.
    ///
    /// Row block `k` of `M_{z_i}* Π` is `sqrt(w_{k+e_i} / w_k)` times block `k + e_i`,
    /// and zero in the top degree, where the compression cuts the shift off.
    pub fn intertwining_residual(&self, t: &OperatorTuple) -> Result<f64> {
        self.check_tuple(t)?;
        let mut worst: f64 = 0.0;
        for i in 0..self.n {
            let t_adj = t.get(i).adjoint();
            let rows: Vec<CMat> = self
                .coefficients
                .keys()
                .map(|k| {
                    let rhs = self.coordinate_block(k) * &t_adj;
                    if k.degree() == self.degree_cut {
                        return -rhs;
                    }
                    let up = k.plus_unit(i);
                    let ratio = (da_weight(&up) / da_weight(k)).sqrt();
                    self.coordinate_block(&up) * real(ratio) - rhs
                })
                .collect();
            worst = worst.max(operator_norm(&vstack(&rows, self.source_dim)));
        }
        Ok(worst)
    }

    fn check_tuple(&self, t: &OperatorTuple) -> Result<()> {
        if t.n() != self.n || t.dim() != self.source_dim {
            return Err(Error::DimensionMismatch(format!(
                "map has n = {}, source dimension {}; tuple has n = {}, dimension {}",
                self.n,
                self.source_dim,
                t.n(),
                t.dim()
            )));
        }
        Ok(())
    }

    /// Rank of the joint coefficient range in `E`; `Π` is minimal iff it equals `fiber_dim`.
    pub fn minimality_rank(&self, tol: &Tolerances) -> usize {
        numerical_rank(&hstack(&self.coordinate_blocks(), self.fiber_dim), tol)
    }

    /// `(I ⊗ V) Π` for `V: C^e → C^{e'}`.
    pub fn compose_fiber(&self, v: &CMat) -> Result<Self> {
        if v.ncols() != self.fiber_dim {
            return Err(Error::DimensionMismatch(format!(
                "fiber map has {} columns, fiber dimension is {}",
                v.ncols(),
                self.fiber_dim
            )));
        }
        Ok(Self {
            n: self.n,
            source_dim: self.source_dim,
            fiber_dim: v.nrows(),
            degree_cut: self.degree_cut,
            coefficients: self
                .coefficients
                .iter()
                .map(|(k, c)| (k.clone(), v * c))
                .collect(),
        })
    }

    fn check_compatible(&self, other: &Self) -> Result<()> {
        if self.n != other.n || self.source_dim != other.source_dim || self.degree_cut != other.degree_cut {
            return Err(Error::DimensionMismatch(format!(
                "maps differ in (n, source_dim, degree_cut): ({}, {}, {}) vs ({}, {}, {})",
                self.n, self.source_dim, self.degree_cut, other.n, other.source_dim, other.degree_cut
            )));
        }
        Ok(())
    }

    pub fn to_file(&self) -> DilationFile {
        DilationFile {
            header: DilationHeader {
                n: self.n,
                source_dim: self.source_dim,
                fiber_dim: self.fiber_dim,
                degree_cut: self.degree_cut,
            },
            coefficients: coefficients_to_json(&self.coefficients),
        }
    }

    pub fn from_file(file: &DilationFile) -> Result<Self> {
        let h = &file.header;
        let coefficients = coefficients_from_json(&file.coefficients, h.n, h.fiber_dim, h.source_dim)?;
        Self::new(h.n, h.source_dim, h.fiber_dim, h.degree_cut, coefficients)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DilationHeader {
    pub n: usize,
    pub source_dim: usize,
    pub fiber_dim: usize,
    pub degree_cut: usize,
}

/// On-disk dilation format.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DilationFile {
    pub header: DilationHeader,
    pub coefficients: serde_json::Map<String, serde_json::Value>,
}

/// The canonical dilation truncated at `N_cut`, with fiber the defect space.
///
/// Coefficients are `c_k = (|k|! / k!) B* D T*^k`, `B` an orthonormal basis of the
/// defect space. Its isometry defect is exactly `||P_T^{N_cut+1}(I)||`, which must be
/// below `residual_tol`; otherwise `NotPure` reports the residual.
pub fn canonical_dilation(t: &OperatorTuple, n_cut: usize, tol: &Tolerances) -> Result<DilationMap> {
    let residual = t.purity_residual_at(n_cut + 1)?;
    if residual >= tol.residual_tol {
        return Err(Error::NotPure { residual, n_cut });
    }
    canonical_dilation_unchecked(t, n_cut, tol)
}

/// Same as [`canonical_dilation`] without the purity gate, for studying truncation error.
pub fn canonical_dilation_unchecked(t: &OperatorTuple, n_cut: usize, tol: &Tolerances) -> Result<DilationMap> {
    let defect = t.defect(tol)?;
    let head = defect.basis.adjoint() * &defect.d;
    let mut powers: BTreeMap<MultiIndex, CMat> = BTreeMap::new();
    let mut coefficients = BTreeMap::new();
    for k in MultiIndex::up_to(t.n(), n_cut) {
        let power = match k.predecessor() {
            None => identity(t.dim()),
            Some((i, prev)) => t.get(i).adjoint() * &powers[&prev],
        };
        coefficients.insert(k.clone(), &head * &power * real(k.multinomial()));
        powers.insert(k, power);
    }
    DilationMap::new(t.n(), t.dim(), defect.defect_dim, n_cut, coefficients)
}

/// A recovered fiber map together with the stacked least-squares residual.
#[derive(Clone, Debug)]
pub struct FiberMap {
    pub map: CMat,
    pub residual: f64,
}

/// Finds `U` with `Π_2 = (I ⊗ U) Π_1` from two minimal dilations of the same tuple.
pub fn match_minimal_dilations(pi1: &DilationMap, pi2: &DilationMap, tol: &Tolerances) -> Result<FiberMap> {
    pi1.check_compatible(pi2)?;
    for pi in [pi1, pi2] {
        let rank = pi.minimality_rank(tol);
        if rank != pi.fiber_dim {
            return Err(Error::NotMinimal {
                rank,
                fiber_dim: pi.fiber_dim,
            });
        }
    }
    solve_fiber_map(pi1, pi2, tol)
}

/// Finds `V: E_c → E` with `Π = (I ⊗ V) Π_c`, after checking that `Π` dilates `T`.
pub fn factor_dilation(
    pi: &DilationMap,
    pic: &DilationMap,
    t: &OperatorTuple,
    tol: &Tolerances,
) -> Result<FiberMap> {
    pi.check_compatible(pic)?;
    let isometry = pi.isometry_defect();
    let intertwining = pi.intertwining_residual(t)?;
    if isometry > tol.residual_tol || intertwining > tol.residual_tol {
        return Err(Error::NotADilation {
            isometry,
            intertwining,
        });
    }
    solve_fiber_map(pic, pi, tol)
}

fn solve_fiber_map(from: &DilationMap, to: &DilationMap, tol: &Tolerances) -> Result<FiberMap> {
    if from.fiber_dim == 0 {
        return Ok(FiberMap {
            map: CMat::zeros(to.fiber_dim, 0),
            residual: operator_norm(&to.coordinate_matrix()),
        });
    }
    let sol = lstsq_intertwiner(&from.coordinate_blocks(), &to.coordinate_blocks(), tol)?;
    Ok(FiberMap {
        map: sol.solution,
        residual: sol.residual,
    })
}
