//! Row contractions on reproducing kernel Hilbert spaces over the unit ball:
//! canonical dilations, invariant subspaces and wandering subspaces, and
//! inner multipliers.

pub mod dilation;
pub mod error;
pub mod json;
pub mod inner_functions;
pub mod invariant_subspaces;
pub mod kernel_spaces;
pub mod numerics;
pub mod row_contractions;

pub use dilation::{canonical_dilation, DilationMap};
pub use error::{Error, Result};
pub use inner_functions::{MatrixPolynomial, QuasiHomogeneityCertificate};
pub use invariant_subspaces::{RepresentationMap, Subspace, TupleAction};
pub use kernel_spaces::{KernelAugmentedSpace, KernelSpec, MultiIndex, SpaceConfig, TruncatedSpace};
pub use numerics::{CMat, CVec, Tolerances};
pub use row_contractions::{DefectData, OperatorTuple};
