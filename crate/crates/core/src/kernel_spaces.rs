//! Truncated reproducing kernel Hilbert spaces `H(K_λ)` on the unit ball.
//!
//! The kernel is `K_λ(z, w) = (1 - <z, w>)^{-λ}`. Monomials are orthogonal with
//! `||z^k||^2 = k! / (λ)_{|k|}`, so λ = 1 gives the Drury-Arveson space, λ = n
//! the Hardy space and λ = n + 1 the Bergman space of the ball.
//!
//! All coordinates are taken with respect to the orthonormalized monomials
//! `z^k e_j / sqrt(w_k)`, which makes adjoints plain conjugate transposes.

use std::cmp::Ordering;
use std::collections::HashMap;
use std::fmt;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::{real, CMat, CVec};

/// Exponent vector `k ∈ ℕ^n`.
///
/// Ordered by total degree, ties broken lexicographically with larger leading
/// exponents first, so degree one reads `z_1, …, z_n`.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct MultiIndex(Vec<u32>);

impl MultiIndex {
    pub fn new(exponents: Vec<u32>) -> Self {
        Self(exponents)
    }

    pub fn zero(n: usize) -> Self {
        Self(vec![0; n])
    }

    pub fn unit(n: usize, i: usize) -> Self {
        let mut e = vec![0; n];
        e[i] = 1;
        Self(e)
    }

    pub fn exponents(&self) -> &[u32] {
        &self.0
    }

    pub fn n(&self) -> usize {
        self.0.len()
    }

    pub fn degree(&self) -> usize {
        self.0.iter().map(|&k| k as usize).sum()
    }

    pub fn factorial(&self) -> f64 {
        self.0
            .iter()
            .map(|&k| (1..=k).map(f64::from).product::<f64>())
            .product()
    }

    /// Multinomial coefficient `|k|! / k!`.
    pub fn multinomial(&self) -> f64 {
        let mut acc = 1.0;
        let mut total = 0u32;
        for &k in &self.0 {
            for j in 1..=k {
                total += 1;
                acc *= f64::from(total) / f64::from(j);
            }
        }
        acc
    }

    pub fn plus(&self, other: &MultiIndex) -> MultiIndex {
        MultiIndex(self.0.iter().zip(&other.0).map(|(a, b)| a + b).collect())
    }

    pub fn plus_unit(&self, i: usize) -> MultiIndex {
        let mut e = self.0.clone();
        e[i] += 1;
        MultiIndex(e)
    }

    /// `self - other` when every entry stays nonnegative.
    pub fn checked_sub(&self, other: &MultiIndex) -> Option<MultiIndex> {
        self.0
            .iter()
            .zip(&other.0)
            .map(|(a, b)| a.checked_sub(*b))
            .collect::<Option<Vec<_>>>()
            .map(MultiIndex)
    }

    /// Index of the first nonzero exponent together with `self - e_i`.
    pub fn predecessor(&self) -> Option<(usize, MultiIndex)> {
        let i = self.0.iter().position(|&k| k > 0)?;
        let mut e = self.0.clone();
        e[i] -= 1;
        Some((i, MultiIndex(e)))
    }

    /// `z^k` evaluated at a point.
    pub fn monomial_at(&self, z: &[Complex64]) -> Complex64 {
        self.0
            .iter()
            .zip(z)
            .fold(real(1.0), |acc, (&k, zi)| acc * zi.powu(k))
    }

    /// Comma-separated key used in JSON files, e.g. `"2,0,1"`.
    pub fn key(&self) -> String {
        self.0
            .iter()
            .map(|k| k.to_string())
            .collect::<Vec<_>>()
            .join(",")
    }

    pub fn parse_key(key: &str) -> Result<Self> {
        key.split(',')
            .map(|s| {
                s.trim()
                    .parse::<u32>()
                    .map_err(|e| Error::Format(format!("bad multi-index key {key:?}: {e}")))
            })
            .collect::<Result<Vec<_>>>()
            .map(MultiIndex)
    }

    /// All multi-indices in `n` variables of total degree exactly `m`, in order.
    pub fn with_degree(n: usize, m: usize) -> Vec<MultiIndex> {
        fn fill(prefix: &mut Vec<u32>, left: usize, slots: usize, out: &mut Vec<MultiIndex>) {
            if slots == 1 {
                prefix.push(left as u32);
                out.push(MultiIndex(prefix.clone()));
                prefix.pop();
                return;
            }
            for first in (0..=left).rev() {
                prefix.push(first as u32);
                fill(prefix, left - first, slots - 1, out);
                prefix.pop();
            }
        }
        let mut out = Vec::new();
        if n == 0 {
            if m == 0 {
                out.push(MultiIndex(Vec::new()));
            }
            return out;
        }
        fill(&mut Vec::with_capacity(n), m, n, &mut out);
        out
    }

    /// All multi-indices of total degree at most `max_degree`, in order.
    pub fn up_to(n: usize, max_degree: usize) -> Vec<MultiIndex> {
        (0..=max_degree)
            .flat_map(|m| Self::with_degree(n, m))
            .collect()
    }
}

impl Ord for MultiIndex {
    fn cmp(&self, other: &Self) -> Ordering {
        self.degree()
            .cmp(&other.degree())
            .then_with(|| other.0.cmp(&self.0))
    }
}

impl PartialOrd for MultiIndex {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl fmt::Display for MultiIndex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({})", self.key())
    }
}

/// Number of monomials of degree at most `max_degree` in `n` variables: `binom(N + n, n)`.
pub fn monomial_count(n: usize, max_degree: usize) -> usize {
    let mut acc: u128 = 1;
    for j in 1..=n as u128 {
        acc = acc * (max_degree as u128 + j) / j;
    }
    acc as usize
}

/// Ambient descriptor `(n, λ)` for `H(K_λ)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct KernelSpec {
    pub n: usize,
    pub lambda: f64,
}

impl KernelSpec {
    pub fn new(n: usize, lambda: f64) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidArgument("ball dimension must be positive".into()));
        }
        if !(lambda.is_finite() && lambda >= 1.0) {
            return Err(Error::InvalidArgument(format!(
                "kernel exponent must be a finite real >= 1, got {lambda}"
            )));
        }
        Ok(Self { n, lambda })
    }

    pub fn drury_arveson(n: usize) -> Self {
        Self { n, lambda: 1.0 }
    }

    pub fn hardy(n: usize) -> Self {
        Self { n, lambda: n as f64 }
    }

    pub fn bergman(n: usize) -> Self {
        Self {
            n,
            lambda: n as f64 + 1.0,
        }
    }

    pub fn weighted_bergman(n: usize, alpha: f64) -> Result<Self> {
        if alpha <= -1.0 {
            return Err(Error::InvalidArgument(format!(
                "weighted Bergman parameter must exceed -1, got {alpha}"
            )));
        }
        Self::new(n, n as f64 + 1.0 + alpha)
    }

    /// `||z^k||^2 = k! / (λ)_{|k|}`, built with `w_{k+e_i} = w_k (k_i + 1) / (λ + |k|)`.
    pub fn monomial_norm_sq(&self, k: &MultiIndex) -> f64 {
        let mut w = 1.0;
        let mut total = 0.0;
        for &ki in k.exponents() {
            for j in 0..ki {
                w *= f64::from(j + 1) / (self.lambda + total);
                total += 1.0;
            }
        }
        w
    }

    /// `(1 - <z, w>)^{-λ}` on the principal branch.
    pub fn kernel_eval(&self, z: &[Complex64], w: &[Complex64]) -> Result<Complex64> {
        check_point(self.n, z)?;
        check_point(self.n, w)?;
        let inner: Complex64 = z.iter().zip(w).map(|(a, b)| a * b.conj()).sum();
        Ok((real(1.0) - inner).powf(-self.lambda))
    }

    /// `K(a, a) - Σ_{|k| <= N} |a^k|^2 / w_k`, summed directly from the tail of the
    /// radial series `Σ_m (λ)_m / m! · |a|^{2m}` to avoid cancellation.
    pub fn kernel_tail_sq(&self, a: &[Complex64], max_degree: usize) -> Result<f64> {
        check_point(self.n, a)?;
        let r2: f64 = a.iter().map(|x| x.norm_sqr()).sum();
        if r2 == 0.0 {
            return Ok(0.0);
        }
        let mut term = 1.0;
        for m in 1..=max_degree {
            term *= (self.lambda + m as f64 - 1.0) / m as f64 * r2;
        }
        let mut sum = 0.0;
        let mut m = max_degree + 1;
        loop {
            term *= (self.lambda + m as f64 - 1.0) / m as f64 * r2;
            sum += term;
            if term <= f64::EPSILON * 1e-3 * sum || m > 1_000_000 {
                break;
            }
            m += 1;
        }
        Ok(sum)
    }
}

fn check_point(n: usize, z: &[Complex64]) -> Result<()> {
    if z.len() != n {
        return Err(Error::DimensionMismatch(format!(
            "point has {} coordinates, expected {n}",
            z.len()
        )));
    }
    let norm = z.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt();
    if norm.is_nan() || norm >= 1.0 {
        return Err(Error::PointOutsideBall { norm });
    }
    Ok(())
}

/// JSON description of a truncated space.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpaceConfig {
    pub n: usize,
    pub lambda: f64,
    pub max_degree: usize,
    #[serde(default = "one")]
    pub fiber_dim: usize,
}

fn one() -> usize {
    1
}

/// Polynomials of degree at most `N` in `H(K_λ) ⊗ C^d`.
///
/// Basis vectors are ordered monomial-major (graded order), fiber-minor.
#[derive(Clone, Debug)]
pub struct TruncatedSpace {
    spec: KernelSpec,
    max_degree: usize,
    fiber_dim: usize,
    monomials: Vec<MultiIndex>,
    index: HashMap<MultiIndex, usize>,
    weights: Vec<f64>,
}

impl TruncatedSpace {
    pub fn new(spec: KernelSpec, max_degree: usize, fiber_dim: usize) -> Result<Self> {
        let spec = KernelSpec::new(spec.n, spec.lambda)?;
        if fiber_dim == 0 {
            return Err(Error::InvalidArgument("fiber dimension must be positive".into()));
        }
        let monomials = MultiIndex::up_to(spec.n, max_degree);
        let index = monomials
            .iter()
            .enumerate()
            .map(|(i, k)| (k.clone(), i))
            .collect();
        let weights = monomials.iter().map(|k| spec.monomial_norm_sq(k)).collect();
        Ok(Self {
            spec,
            max_degree,
            fiber_dim,
            monomials,
            index,
            weights,
        })
    }

    pub fn scalar(spec: KernelSpec, max_degree: usize) -> Result<Self> {
        Self::new(spec, max_degree, 1)
    }

    pub fn from_config(cfg: &SpaceConfig) -> Result<Self> {
        Self::new(KernelSpec::new(cfg.n, cfg.lambda)?, cfg.max_degree, cfg.fiber_dim)
    }

    pub fn config(&self) -> SpaceConfig {
        SpaceConfig {
            n: self.spec.n,
            lambda: self.spec.lambda,
            max_degree: self.max_degree,
            fiber_dim: self.fiber_dim,
        }
    }

    pub fn spec(&self) -> &KernelSpec {
        &self.spec
    }

    pub fn n(&self) -> usize {
        self.spec.n
    }

    pub fn max_degree(&self) -> usize {
        self.max_degree
    }

    pub fn fiber_dim(&self) -> usize {
        self.fiber_dim
    }

    pub fn dim(&self) -> usize {
        self.monomials.len() * self.fiber_dim
    }

    pub fn monomials(&self) -> &[MultiIndex] {
        &self.monomials
    }

    /// Monomial weights `w_k`, aligned with [`Self::monomials`].
    pub fn monomial_weights(&self) -> &[f64] {
        &self.weights
    }

    /// `(multi-index, fiber index)` pairs in coordinate order.
    pub fn basis(&self) -> Vec<(MultiIndex, usize)> {
        self.monomials
            .iter()
            .flat_map(|k| (0..self.fiber_dim).map(move |j| (k.clone(), j)))
            .collect()
    }

    /// Weight `w_k` of every basis vector, in coordinate order.
    pub fn basis_weights(&self) -> Vec<f64> {
        self.weights
            .iter()
            .flat_map(|&w| std::iter::repeat_n(w, self.fiber_dim))
            .collect()
    }

    pub fn monomial_position(&self, k: &MultiIndex) -> Option<usize> {
        self.index.get(k).copied()
    }

    pub fn coordinate(&self, k: &MultiIndex, j: usize) -> Option<usize> {
        if j >= self.fiber_dim {
            return None;
        }
        self.monomial_position(k).map(|p| p * self.fiber_dim + j)
    }

    /// Number of leading coordinates spanned by monomials of degree at most `m`.
    pub fn graded_prefix(&self, m: usize) -> usize {
        self.monomials.iter().take_while(|k| k.degree() <= m).count() * self.fiber_dim
    }

    /// Dimension of the degree ≤ N−1 part, on which multiplication by `z_i` is not truncated.
    pub fn interior_dim(&self) -> usize {
        match self.max_degree {
            0 => 0,
            n => self.graded_prefix(n - 1),
        }
    }

    /// Matrix of the compression `P_N M_{z_i}` to the degree ≤ N polynomials.
    ///
    /// `i` is zero-based. Monomials of top degree are mapped to zero.
    pub fn multiplication_matrix(&self, i: usize) -> Result<CMat> {
        if i >= self.n() {
            return Err(Error::InvalidArgument(format!(
                "coordinate index {i} out of range for n = {}",
                self.n()
            )));
        }
        let d = self.dim();
        let mut m = CMat::zeros(d, d);
        for (col, k) in self.monomials.iter().enumerate() {
            if k.degree() == self.max_degree {
                continue;
            }
            let target = k.plus_unit(i);
            let row = self.index[&target];
            let ratio = (self.weights[row] / self.weights[col]).sqrt();
            for j in 0..self.fiber_dim {
                m[(row * self.fiber_dim + j, col * self.fiber_dim + j)] = real(ratio);
            }
        }
        Ok(m)
    }

    /// Vector `v` with `<f, v> = f(a)` for every polynomial `f` of degree ≤ N.
    pub fn point_evaluation_vector(&self, a: &[Complex64]) -> Result<CVec> {
        if self.fiber_dim != 1 {
            return Err(Error::InvalidArgument(
                "point evaluation needs a scalar space (fiber_dim = 1)".into(),
            ));
        }
        check_point(self.n(), a)?;
        Ok(CVec::from_iterator(
            self.monomials.len(),
            self.monomials
                .iter()
                .zip(&self.weights)
                .map(|(k, w)| k.monomial_at(a).conj() / w.sqrt()),
        ))
    }

    /// Coordinates of a polynomial given as a map from multi-indices to coefficients.
    /// Terms above the truncation degree are dropped.
    pub fn coordinates_of<'a, I>(&self, terms: I) -> CVec
    where
        I: IntoIterator<Item = (&'a MultiIndex, Complex64)>,
    {
        assert_eq!(self.fiber_dim, 1, "coordinates_of expects a scalar space");
        let mut v = CVec::zeros(self.dim());
        for (k, c) in terms {
            if let Some(p) = self.monomial_position(k) {
                v[p] += c * self.weights[p].sqrt();
            }
        }
        v
    }
}

/// `P_N ⊕ span{u}`, where `u` is the normalized tail `Σ_{|k| > N} ā^k z^k / w_k` of the kernel at `a`.
///
/// This space is co-invariant for `M_z`, so compressing the multiplication tuple to
/// it yields a commuting pure row contraction. Unlike `P_N` it contains `K_a`, which
/// makes `{f : f(a) = 0}` an exactly invariant subspace of the compressed tuple.
#[derive(Clone, Debug)]
pub struct KernelAugmentedSpace {
    base: TruncatedSpace,
    point: Vec<Complex64>,
    tail_norm: f64,
}

impl KernelAugmentedSpace {
    pub fn new(spec: KernelSpec, max_degree: usize, a: &[Complex64]) -> Result<Self> {
        let base = TruncatedSpace::scalar(spec, max_degree)?;
        let tail_norm = spec.kernel_tail_sq(a, max_degree)?.sqrt();
        if tail_norm == 0.0 {
            return Err(Error::InvalidArgument(
                "kernel tail vanishes (a = 0); use the plain truncated space".into(),
            ));
        }
        Ok(Self {
            base,
            point: a.to_vec(),
            tail_norm,
        })
    }

    pub fn base(&self) -> &TruncatedSpace {
        &self.base
    }

    pub fn point(&self) -> &[Complex64] {
        &self.point
    }

    pub fn tail_norm(&self) -> f64 {
        self.tail_norm
    }

    pub fn n(&self) -> usize {
        self.base.n()
    }

    /// `dim P_N + 1`; the tail direction is the last coordinate.
    pub fn dim(&self) -> usize {
        self.base.dim() + 1
    }

    /// Compression of `M_{z_i}` (zero-based `i`).
    ///
    /// Top-degree monomials map onto the tail direction with coefficient
    /// `a^{k+e_i} / (sqrt(w_k) ||R||)`; the tail direction is an eigenvector with eigenvalue `a_i`.
    pub fn multiplication_matrix(&self, i: usize) -> Result<CMat> {
        let inner = self.base.multiplication_matrix(i)?;
        let d = self.dim();
        let tail = d - 1;
        let mut m = CMat::zeros(d, d);
        m.view_mut((0, 0), inner.shape()).copy_from(&inner);
        let weights = self.base.monomial_weights();
        for (col, k) in self.base.monomials().iter().enumerate() {
            if k.degree() == self.base.max_degree() {
                let target = k.plus_unit(i);
                m[(tail, col)] = target.monomial_at(&self.point) / (weights[col].sqrt() * self.tail_norm);
            }
        }
        m[(tail, tail)] = self.point[i];
        Ok(m)
    }

    /// Coordinates of the reproducing kernel `K_a`.
    pub fn kernel_vector(&self) -> CVec {
        let head = self
            .base
            .point_evaluation_vector(&self.point)
            .expect("point validated at construction");
        let mut v = CVec::zeros(self.dim());
        v.rows_mut(0, head.len()).copy_from(&head);
        v[self.dim() - 1] = real(self.tail_norm);
        v
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::{c64, operator_norm};

    /// Coefficients of `Σ_m (Σ_i t_i)^m` raised to an integer power, truncated at
    /// `max_degree`, by brute-force polynomial multiplication. The coefficient of
    /// `t^k` is `1 / w_k` for `K_λ` with integer λ.
    fn kernel_series_oracle(n: usize, lambda: u32, max_degree: usize) -> HashMap<Vec<u32>, f64> {
        type Poly = HashMap<Vec<u32>, f64>;
        let mul = |a: &Poly, b: &Poly| {
            let mut out = Poly::new();
            for (ka, ca) in a {
                for (kb, cb) in b {
                    let k: Vec<u32> = ka.iter().zip(kb).map(|(x, y)| x + y).collect();
                    if k.iter().sum::<u32>() as usize <= max_degree {
                        *out.entry(k).or_insert(0.0) += ca * cb;
                    }
                }
            }
            out
        };
        let mut s = Poly::new();
        for i in 0..n {
            let mut k = vec![0; n];
            k[i] = 1;
            s.insert(k, 1.0);
        }
        // geometric series in s
        let mut geom = Poly::new();
        geom.insert(vec![0; n], 1.0);
        let mut power = geom.clone();
        for _ in 0..max_degree {
            power = mul(&power, &s);
            for (k, c) in &power {
                *geom.entry(k.clone()).or_insert(0.0) += c;
            }
        }
        let mut out = Poly::new();
        out.insert(vec![0; n], 1.0);
        for _ in 0..lambda {
            out = mul(&out, &geom);
        }
        out
    }

    #[test]
    fn graded_order() {
        let ks = MultiIndex::up_to(2, 2);
        let keys: Vec<String> = ks.iter().map(|k| k.key()).collect();
        assert_eq!(keys, ["0,0", "1,0", "0,1", "2,0", "1,1", "0,2"]);
        assert!(ks.windows(2).all(|w| w[0] < w[1]));
        assert_eq!(ks.len(), monomial_count(2, 2));
        assert_eq!(monomial_count(3, 4), 35);
        assert_eq!(MultiIndex::parse_key("2, 0,1").unwrap(), MultiIndex::new(vec![2, 0, 1]));
    }

    #[test]
    fn weights_match_series_oracle() {
        let k11 = MultiIndex::new(vec![1, 1]);
        assert_eq!(KernelSpec::drury_arveson(2).monomial_norm_sq(&MultiIndex::zero(2)), 1.0);

        let oracle = kernel_series_oracle(2, 1, 4);
        assert!((1.0 / oracle[&vec![1, 1]] - 0.5).abs() < 1e-15);
        assert!((KernelSpec::drury_arveson(2).monomial_norm_sq(&k11) - 0.5).abs() < 1e-15);

        let oracle = kernel_series_oracle(1, 2, 4);
        assert!((1.0 / oracle[&vec![3]] - 0.25).abs() < 1e-15);
        let spec = KernelSpec::new(1, 2.0).unwrap();
        assert!((spec.monomial_norm_sq(&MultiIndex::new(vec![3])) - 0.25).abs() < 1e-15);

        for (n, lambda) in [(2, 1), (2, 2), (3, 3), (2, 4)] {
            let oracle = kernel_series_oracle(n, lambda, 5);
            let spec = KernelSpec::new(n, lambda as f64).unwrap();
            for k in MultiIndex::up_to(n, 5) {
                let w = spec.monomial_norm_sq(&k);
                let expected = 1.0 / oracle[&k.exponents().to_vec()];
                assert!((w - expected).abs() < 1e-13 * expected, "{k} λ={lambda}");
            }
        }
    }

    #[test]
    fn weight_recursion_and_closed_form() {
        for lambda in [1.0, 1.5, 2.0, 3.0] {
            let spec = KernelSpec::new(3, lambda).unwrap();
            for k in MultiIndex::up_to(3, 8) {
                let rising: f64 = (0..k.degree()).map(|j| lambda + j as f64).product();
                let closed = k.factorial() / rising;
                let w = spec.monomial_norm_sq(&k);
                assert!((w - closed).abs() <= 1e-13 * closed);
                for i in 0..3 {
                    let ratio = spec.monomial_norm_sq(&k.plus_unit(i)) / w;
                    let expected = (k.exponents()[i] as f64 + 1.0) / (lambda + k.degree() as f64);
                    assert!((ratio - expected).abs() < 1e-13);
                }
            }
        }
    }

    #[test]
    fn kernel_values() {
        let spec = KernelSpec::drury_arveson(1);
        let zero = [c64(0.0, 0.0)];
        assert_eq!(spec.kernel_eval(&zero, &zero).unwrap(), real(1.0));
        let h = [c64(0.5, 0.0)];
        assert!((spec.kernel_eval(&h, &h).unwrap() - real(4.0 / 3.0)).norm() < 1e-15);
        assert!(matches!(
            spec.kernel_eval(&[c64(1.0, 0.0)], &zero),
            Err(Error::PointOutsideBall { .. })
        ));
    }

    #[test]
    fn kernel_series_converges() {
        let spec = KernelSpec::new(2, 2.0).unwrap();
        let z = [c64(0.3, 0.0), c64(0.2, 0.0)];
        let exact = spec.kernel_eval(&z, &z).unwrap();
        let series: Complex64 = MultiIndex::up_to(2, 40)
            .iter()
            .map(|k| k.monomial_at(&z) * k.monomial_at(&z).conj() / spec.monomial_norm_sq(k))
            .sum();
        assert!((series - exact).norm() / exact.norm() < 1e-8);
        // the tail helper accounts for the remainder
        let tail = spec.kernel_tail_sq(&z, 10).unwrap();
        let head: f64 = MultiIndex::up_to(2, 10)
            .iter()
            .map(|k| k.monomial_at(&z).norm_sqr() / spec.monomial_norm_sq(k))
            .sum();
        assert!((head + tail - exact.re).abs() < 1e-13);
    }

    #[test]
    fn shift_matrices() {
        let space = TruncatedSpace::scalar(KernelSpec::drury_arveson(1), 3).unwrap();
        let m = space.multiplication_matrix(0).unwrap();
        let mut expected = CMat::zeros(4, 4);
        for i in 0..3 {
            expected[(i + 1, i)] = real(1.0);
        }
        assert_eq!(m, expected);

        let space = TruncatedSpace::scalar(KernelSpec::drury_arveson(2), 2).unwrap();
        let m1 = space.multiplication_matrix(0).unwrap();
        let one = space.coordinate(&MultiIndex::zero(2), 0).unwrap();
        let z1 = space.coordinate(&MultiIndex::unit(2, 0), 0).unwrap();
        assert!((m1[(z1, one)] - real(1.0)).norm() < 1e-15);
        assert!(space.multiplication_matrix(2).is_err());
    }

    #[test]
    fn top_degree_columns_vanish() {
        for (n, lambda, deg, fiber) in [(1, 1.0, 3, 1), (2, 2.0, 3, 2), (3, 1.5, 2, 1)] {
            let space = TruncatedSpace::new(KernelSpec::new(n, lambda).unwrap(), deg, fiber).unwrap();
            let start = space.interior_dim();
            for i in 0..n {
                let m = space.multiplication_matrix(i).unwrap();
                assert!(m.columns(start, space.dim() - start).iter().all(|x| *x == real(0.0)));
            }
        }
    }

    #[test]
    fn point_evaluation() {
        let space = TruncatedSpace::scalar(KernelSpec::drury_arveson(2), 3).unwrap();
        let v = space.point_evaluation_vector(&[c64(0.0, 0.0), c64(0.0, 0.0)]).unwrap();
        assert_eq!(v[0], real(1.0));
        assert!(v.iter().skip(1).all(|x| *x == real(0.0)));

        let space = TruncatedSpace::scalar(KernelSpec::drury_arveson(1), 2).unwrap();
        let v = space.point_evaluation_vector(&[c64(0.5, 0.0)]).unwrap();
        let expected = CVec::from_vec(vec![real(1.0), real(0.5), real(0.25)]);
        assert!((v - expected).norm() < 1e-15);

        // <K_a truncated, v> = K_N(a, a) → K(a, a)
        let spec = KernelSpec::new(2, 2.0).unwrap();
        let space = TruncatedSpace::scalar(spec, 30).unwrap();
        let a = [c64(0.3, 0.1), c64(-0.2, 0.25)];
        let v = space.point_evaluation_vector(&a).unwrap();
        let k = spec.kernel_eval(&a, &a).unwrap();
        assert!((v.dotc(&v) - k).norm() < 1e-9);

        let vec_space = TruncatedSpace::new(spec, 2, 2).unwrap();
        assert!(vec_space.point_evaluation_vector(&a).is_err());
        assert!(matches!(
            space.point_evaluation_vector(&[c64(0.8, 0.0), c64(0.8, 0.0)]),
            Err(Error::PointOutsideBall { .. })
        ));
    }

    #[test]
    fn compressed_tuple_is_commuting_nilpotent_row_contraction() {
        for n in 1..=3 {
            for lambda in [1.0, 2.0, 3.5] {
                for deg in 0..=4 {
                    let space = TruncatedSpace::scalar(KernelSpec::new(n, lambda).unwrap(), deg).unwrap();
                    let ms: Vec<CMat> = (0..n).map(|i| space.multiplication_matrix(i).unwrap()).collect();
                    for i in 0..n {
                        for j in 0..n {
                            assert!(operator_norm(&(&ms[i] * &ms[j] - &ms[j] * &ms[i])) <= 1e-12);
                        }
                    }
                    let row: CMat = ms.iter().map(|m| m * m.adjoint()).sum();
                    assert!(operator_norm(&row) <= 1.0 + 1e-12);
                    // any product of deg + 1 factors vanishes; z_1^{deg+1} suffices per index pattern
                    let mut p = CMat::identity(space.dim(), space.dim());
                    for step in 0..=deg {
                        p = &ms[step % n] * p;
                    }
                    assert!(p.iter().all(|x| *x == real(0.0)));
                }
            }
        }
    }

    #[test]
    fn augmented_space_tuple() {
        let spec = KernelSpec::drury_arveson(2);
        let a = [c64(0.5, 0.0), c64(0.0, 0.0)];
        let aug = KernelAugmentedSpace::new(spec, 4, &a).unwrap();
        assert_eq!(aug.dim(), monomial_count(2, 4) + 1);
        let m: Vec<CMat> = (0..2).map(|i| aug.multiplication_matrix(i).unwrap()).collect();
        assert!(operator_norm(&(&m[0] * &m[1] - &m[1] * &m[0])) < 1e-14);
        let row: CMat = m.iter().map(|x| x * x.adjoint()).sum();
        assert!(operator_norm(&row) <= 1.0 + 1e-12);
        // ||K_a||^2 = K(a, a), and K_a is a joint eigenvector of the adjoints
        let k = aug.kernel_vector();
        let kaa = spec.kernel_eval(&a, &a).unwrap().re;
        assert!((k.norm_squared() - kaa).abs() < 1e-13);
        for (i, mi) in m.iter().enumerate() {
            let lhs = mi.adjoint() * &k;
            assert!((lhs - &k * a[i].conj()).norm() < 1e-13);
        }
        assert!(KernelAugmentedSpace::new(spec, 4, &[c64(0.0, 0.0), c64(0.0, 0.0)]).is_err());
    }
}
