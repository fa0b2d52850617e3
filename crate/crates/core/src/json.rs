//! JSON conventions shared by every file format.
//!
//! A complex matrix is a row-major array of rows, each entry a `[re, im]` pair.
//! Coefficient families are objects keyed by multi-index strings such as `"1,0,2"`.

use std::collections::BTreeMap;

use num_complex::Complex64;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::kernel_spaces::MultiIndex;
use crate::numerics::{c64, CMat};

pub type MatrixJson = Vec<Vec<[f64; 2]>>;

pub fn matrix_to_json(m: &CMat) -> MatrixJson {
    (0..m.nrows())
        .map(|i| (0..m.ncols()).map(|j| [m[(i, j)].re, m[(i, j)].im]).collect())
        .collect()
}

/// Parses a row-major matrix. `cols_hint` fixes the width of a matrix with no rows.
pub fn matrix_from_json(rows: &MatrixJson, cols_hint: Option<usize>) -> Result<CMat> {
    let ncols = rows.first().map(Vec::len).or(cols_hint).unwrap_or(0);
    if let Some(bad) = rows.iter().position(|r| r.len() != ncols) {
        return Err(Error::Format(format!(
            "row {bad} has {} entries, expected {ncols}",
            rows[bad].len()
        )));
    }
    Ok(CMat::from_fn(rows.len(), ncols, |i, j| {
        let [re, im] = rows[i][j];
        c64(re, im)
    }))
}

/// `#[serde(with = "json::matrix")]` adapter for a single matrix field.
pub mod matrix {
    use super::*;

    pub fn serialize<S: Serializer>(m: &CMat, s: S) -> std::result::Result<S::Ok, S::Error> {
        matrix_to_json(m).serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<CMat, D::Error> {
        let rows = MatrixJson::deserialize(d)?;
        matrix_from_json(&rows, None).map_err(serde::de::Error::custom)
    }
}

/// Keyed coefficient blocks in graded order.
pub fn coefficients_to_json(coeffs: &BTreeMap<MultiIndex, CMat>) -> serde_json::Map<String, serde_json::Value> {
    coeffs
        .iter()
        .map(|(k, m)| {
            (
                k.key(),
                serde_json::to_value(matrix_to_json(m)).expect("matrices serialize"),
            )
        })
        .collect()
}

/// Parses keyed blocks, checking that every key has `n` entries and every block is `rows x cols`.
pub fn coefficients_from_json(
    obj: &serde_json::Map<String, serde_json::Value>,
    n: usize,
    rows: usize,
    cols: usize,
) -> Result<BTreeMap<MultiIndex, CMat>> {
    let mut out = BTreeMap::new();
    for (key, value) in obj {
        let k = MultiIndex::parse_key(key)?;
        if k.n() != n {
            return Err(Error::Format(format!("key {key:?} has {} entries, expected {n}", k.n())));
        }
        let raw: MatrixJson = serde_json::from_value(value.clone())
            .map_err(|e| Error::Format(format!("block {key:?}: {e}")))?;
        let m = if raw.is_empty() {
            CMat::zeros(0, cols)
        } else {
            matrix_from_json(&raw, Some(cols))?
        };
        if m.shape() != (rows, cols) {
            return Err(Error::Format(format!(
                "block {key:?} is {}x{}, expected {rows}x{cols}",
                m.nrows(),
                m.ncols()
            )));
        }
        out.insert(k, m);
    }
    Ok(out)
}

pub fn complex_to_json(z: Complex64) -> [f64; 2] {
    [z.re, z.im]
}
