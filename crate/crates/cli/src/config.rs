use std::fs;
use std::path::{Path, PathBuf};

use num_complex::Complex64;
use rowdil_core::inner_functions::PolynomialFile;
use rowdil_core::invariant_subspaces::Subspace;
use rowdil_core::json::MatrixJson;
use rowdil_core::row_contractions::{random_row_contraction, random_unitary_tuple, TupleFile};
use rowdil_core::{KernelSpec, MatrixPolynomial, OperatorTuple, Tolerances, TruncatedSpace};
use serde::{Deserialize, Serialize};

use crate::Failure;

pub const TOL_ENV: &str = "ROWDIL_TOL";

/// One experiment. A config file may also carry a batch under `experiments`,
/// in which case the top-level fields are defaults for every entry.
#[derive(Clone, Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub id: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub command: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub space: Option<SpaceSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tuple: Option<TupleSource>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub subspace: Option<SubspaceSource>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub polynomial: Option<PolynomialSource>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tolerances: Option<ToleranceSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub probe: Option<ProbeDepths>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub experiments: Vec<ExperimentConfig>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpaceSection {
    pub n: usize,
    #[serde(default = "one")]
    pub lambda: f64,
    #[serde(default)]
    pub max_degree: usize,
}

fn one() -> f64 {
    1.0
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(tag = "source", rename_all = "kebab-case", deny_unknown_fields)]
pub enum TupleSource {
    /// Compression of `M_z` to polynomials of degree ≤ `max_degree` in the configured space.
    CompressedShift,
    /// Random commuting tuple on `C^dim` with `||P_T(I)|| = scale`.
    Random {
        dim: usize,
        scale: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        seed: Option<u64>,
    },
    /// Diagonalizable tuple with `P_T(I) = I`, optionally shrunk so that `||P_T(I)|| = scale`.
    Unitary {
        dim: usize,
        #[serde(default = "one")]
        scale: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        seed: Option<u64>,
    },
    File { path: PathBuf },
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum SubspaceSource {
    Full,
    /// `{f : f(a) = 0}`; `a` as `[re, im]` pairs.
    ZeroBased { a: Vec<[f64; 2]> },
    /// `{"basis": rows}` with orthonormal columns.
    File { path: PathBuf },
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(untagged)]
pub enum PolynomialSource {
    Terms { terms: Vec<Term> },
    File { path: PathBuf },
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Term {
    pub k: Vec<u32>,
    pub c: [f64; 2],
}

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ToleranceSection {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rank_tol: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub residual_tol: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub psd_clip: Option<f64>,
}

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProbeDepths {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_cut: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub probe_degree: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub block_max: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub m_max: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_list: Option<Vec<usize>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub trials: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub extra_fiber: Option<usize>,
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self, Failure> {
        let text = fs::read_to_string(path).map_err(|e| Failure::io(format!("{}: {e}", path.display())))?;
        let mut cfg: Self =
            serde_json::from_str(&text).map_err(|e| Failure::config(format!("{}: {e}", path.display())))?;
        let base = path.parent().unwrap_or_else(|| Path::new("."));
        cfg.resolve_paths(base);
        Ok(cfg)
    }

    fn resolve_paths(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        if let Some(TupleSource::File { path }) = &mut self.tuple {
            fix(path);
        }
        if let Some(SubspaceSource::File { path }) = &mut self.subspace {
            fix(path);
        }
        if let Some(PolynomialSource::File { path }) = &mut self.polynomial {
            fix(path);
        }
        for e in &mut self.experiments {
            e.resolve_paths(base);
        }
    }

    /// Entry `e` of the batch with unset fields taken from `self`.
    pub fn inherit(&self, e: &ExperimentConfig) -> ExperimentConfig {
        ExperimentConfig {
            id: e.id.clone(),
            command: e.command.clone().or_else(|| self.command.clone()),
            space: e.space.clone().or_else(|| self.space.clone()),
            tuple: e.tuple.clone().or_else(|| self.tuple.clone()),
            subspace: e.subspace.clone().or_else(|| self.subspace.clone()),
            polynomial: e.polynomial.clone().or_else(|| self.polynomial.clone()),
            tolerances: e.tolerances.clone().or_else(|| self.tolerances.clone()),
            probe: e.probe.clone().or_else(|| self.probe.clone()),
            seed: e.seed.or(self.seed),
            output: None,
            experiments: Vec::new(),
        }
    }

    /// `--seed` wins over every seed in the file.
    pub fn override_seed(&mut self, seed: u64) {
        self.seed = Some(seed);
        match &mut self.tuple {
            Some(TupleSource::Random { seed: s, .. }) | Some(TupleSource::Unitary { seed: s, .. }) => *s = None,
            _ => {}
        }
        for e in &mut self.experiments {
            e.override_seed(seed);
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed.unwrap_or(0)
    }

    pub fn probe(&self) -> ProbeDepths {
        self.probe.clone().unwrap_or_default()
    }

    pub fn space_section(&self) -> Result<&SpaceSection, Failure> {
        self.space.as_ref().ok_or_else(|| Failure::config("missing `space`"))
    }

    pub fn kernel_spec(&self) -> Result<KernelSpec, Failure> {
        let s = self.space_section()?;
        Ok(KernelSpec::new(s.n, s.lambda)?)
    }

    pub fn truncated_space(&self) -> Result<TruncatedSpace, Failure> {
        let s = self.space_section()?;
        Ok(TruncatedSpace::scalar(self.kernel_spec()?, s.max_degree)?)
    }

    /// Tolerances from the file, defaults, and the `ROWDIL_TOL` override of `residual_tol`.
    pub fn tolerances(&self) -> Result<Tolerances, Failure> {
        let d = Tolerances::default();
        let t = self.tolerances.clone().unwrap_or_default();
        let mut tol = Tolerances::new(
            t.rank_tol.unwrap_or(d.rank_tol),
            t.residual_tol.unwrap_or(d.residual_tol),
            t.psd_clip.unwrap_or(d.psd_clip),
        )?;
        if let Ok(raw) = std::env::var(TOL_ENV) {
            let v: f64 = raw
                .trim()
                .parse()
                .map_err(|_| Failure::config(format!("{TOL_ENV}={raw:?} is not a number")))?;
            tol = tol.with_residual_tol(v)?;
        }
        Ok(tol)
    }

    pub fn tuple(&self) -> Result<OperatorTuple, Failure> {
        let source = self.tuple.as_ref().ok_or_else(|| Failure::config("missing `tuple`"))?;
        match source {
            TupleSource::CompressedShift => Ok(OperatorTuple::compressed_shift(&self.truncated_space()?)),
            TupleSource::Random { dim, scale, seed } => {
                let n = self.space_section()?.n;
                Ok(random_row_contraction(n, *dim, seed.unwrap_or(self.seed()), *scale)?)
            }
            TupleSource::Unitary { dim, scale, seed } => {
                if !(*scale > 0.0 && *scale <= 1.0) {
                    return Err(Failure::config(format!("unitary scale must lie in (0, 1], got {scale}")));
                }
                let n = self.space_section()?.n;
                Ok(random_unitary_tuple(n, *dim, seed.unwrap_or(self.seed()))?.scaled(scale.sqrt()))
            }
            TupleSource::File { path } => {
                let file: TupleFile = read_json(path)?;
                Ok(OperatorTuple::from_file(&file)?)
            }
        }
    }

    pub fn polynomial(&self) -> Result<MatrixPolynomial, Failure> {
        let source = self.polynomial.as_ref().ok_or_else(|| Failure::config("missing `polynomial`"))?;
        match source {
            PolynomialSource::Terms { terms } => {
                let n = self.space_section()?.n;
                let terms: Vec<(Vec<u32>, Complex64)> =
                    terms.iter().map(|t| (t.k.clone(), Complex64::new(t.c[0], t.c[1]))).collect();
                Ok(MatrixPolynomial::scalar(n, &terms)?)
            }
            PolynomialSource::File { path } => {
                let file: PolynomialFile = read_json(path)?;
                Ok(MatrixPolynomial::from_file(&file)?)
            }
        }
    }
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct SubspaceFile {
    basis: MatrixJson,
}

pub fn read_subspace(path: &Path) -> Result<Subspace, Failure> {
    let file: SubspaceFile = read_json(path)?;
    Ok(Subspace::from_json(&file.basis)?)
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T, Failure> {
    let text = fs::read_to_string(path).map_err(|e| Failure::io(format!("{}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| Failure::config(format!("{}: {e}", path.display())))
}
