//! Orthonormal Hermite chaos algebra on `(ℝⁿ, μ)` with `μ` the standard
//! Gaussian measure: basis evaluation, sparse coefficient arithmetic, and
//! tensorized Gauss–Hermite quadrature.
//!
//! The basis element attached to a multi-index `β` is
//! `Ψ_β(x) = Π_i h_{β_i}(x_i)` where `h_k` is the probabilists' Hermite
//! polynomial normalized so that `E_μ[h_j h_k] = δ_jk`. On this basis the
//! `L²(μ)` pairing is plain coefficient arithmetic (Parseval).

use std::collections::BTreeMap;

use nalgebra::DMatrix;

use crate::{Error, Result};

/// Multi-index `β ∈ ℕⁿ` labelling one tensor Hermite basis element.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct MultiIndex(Vec<u32>);

impl MultiIndex {
    pub fn new(entries: Vec<u32>) -> Self {
        MultiIndex(entries)
    }

    pub fn zero(dim: usize) -> Self {
        MultiIndex(vec![0; dim])
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    /// Total degree `|β| = Σ_i β_i`.
    pub fn degree(&self) -> u32 {
        self.0.iter().sum()
    }

    pub fn entries(&self) -> &[u32] {
        &self.0
    }

    pub fn entry(&self, axis: usize) -> u32 {
        self.0[axis]
    }

    /// `β + e_axis`.
    pub fn raised(&self, axis: usize) -> Self {
        let mut e = self.0.clone();
        e[axis] += 1;
        MultiIndex(e)
    }

    /// `β − e_axis`, or `None` when `β_axis = 0`.
    pub fn lowered(&self, axis: usize) -> Option<Self> {
        if self.0[axis] == 0 {
            return None;
        }
        let mut e = self.0.clone();
        e[axis] -= 1;
        Some(MultiIndex(e))
    }
}

/// `h_k(x)`: probabilists' Hermite polynomial normalized to unit `L²(μ)`
/// norm, by the stable three-term recurrence
/// `h_{k+1}(x) = (x·h_k(x) − √k·h_{k−1}(x)) / √(k+1)`.
pub fn hermite_eval(k: u32, x: f64) -> f64 {
    if k == 0 {
        return 1.0;
    }
    let mut prev = 1.0;
    let mut cur = x;
    for j in 1..k {
        let jf = j as f64;
        let next = (x * cur - jf.sqrt() * prev) / (jf + 1.0).sqrt();
        prev = cur;
        cur = next;
    }
    cur
}

/// Table `[h_0(x), …, h_max_k(x)]` from the same recurrence.
pub fn hermite_values(max_k: u32, x: f64) -> Vec<f64> {
    let mut vals = Vec::with_capacity(max_k as usize + 1);
    vals.push(1.0);
    if max_k == 0 {
        return vals;
    }
    vals.push(x);
    for j in 1..max_k {
        let jf = j as f64;
        let next = (x * vals[j as usize] - jf.sqrt() * vals[j as usize - 1]) / (jf + 1.0).sqrt();
        vals.push(next);
    }
    vals
}

/// All multi-indices of dimension `dim` and total degree ≤ `max_degree`,
/// in graded order (degree-major, then lexicographic in the entries).
/// The count is `C(dim + max_degree, dim)`.
pub fn multi_indices(dim: usize, max_degree: u32) -> Vec<MultiIndex> {
    let mut out = Vec::new();
    let mut current = vec![0u32; dim];
    for total in 0..=max_degree {
        enumerate_rec(0, total, &mut current, &mut out);
    }
    out
}

fn enumerate_rec(axis: usize, remaining: u32, current: &mut [u32], out: &mut Vec<MultiIndex>) {
    if axis + 1 == current.len() {
        current[axis] = remaining;
        out.push(MultiIndex(current.to_vec()));
        return;
    }
    for v in 0..=remaining {
        current[axis] = v;
        enumerate_rec(axis + 1, remaining - v, current, out);
    }
}

/// A square-integrable function of an n-dimensional standard Gaussian,
/// stored as sparse coefficients on the orthonormal Hermite tensor basis,
/// truncated at total degree `max_degree`.
#[derive(Debug, Clone, PartialEq)]
pub struct ChaosFn {
    dim: usize,
    max_degree: u32,
    coeffs: BTreeMap<MultiIndex, f64>,
}

impl ChaosFn {
    pub fn zero(dim: usize, max_degree: u32) -> Self {
        ChaosFn {
            dim,
            max_degree,
            coeffs: BTreeMap::new(),
        }
    }

    pub fn constant(dim: usize, value: f64) -> Self {
        let mut coeffs = BTreeMap::new();
        if value != 0.0 {
            coeffs.insert(MultiIndex::zero(dim), value);
        }
        ChaosFn {
            dim,
            max_degree: 0,
            coeffs,
        }
    }

    /// The single basis element `Ψ_β`.
    pub fn basis(dim: usize, index: MultiIndex) -> Result<Self> {
        if index.dim() != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                got: index.dim(),
            });
        }
        let max_degree = index.degree();
        let mut coeffs = BTreeMap::new();
        coeffs.insert(index, 1.0);
        Ok(ChaosFn {
            dim,
            max_degree,
            coeffs,
        })
    }

    pub fn from_coeffs<I>(dim: usize, max_degree: u32, entries: I) -> Result<Self>
    where
        I: IntoIterator<Item = (MultiIndex, f64)>,
    {
        let mut coeffs = BTreeMap::new();
        for (idx, c) in entries {
            if idx.dim() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    got: idx.dim(),
                });
            }
            if idx.degree() > max_degree {
                return Err(Error::InvalidParameter(format!(
                    "index of degree {} exceeds max_degree {}",
                    idx.degree(),
                    max_degree
                )));
            }
            if !c.is_finite() {
                return Err(Error::NonFinite {
                    context: "chaos coefficient".into(),
                });
            }
            if c != 0.0 {
                coeffs.insert(idx, c);
            }
        }
        Ok(ChaosFn {
            dim,
            max_degree,
            coeffs,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn max_degree(&self) -> u32 {
        self.max_degree
    }

    /// Coefficient at `β` (absent entries read as 0).
    pub fn coeff(&self, index: &MultiIndex) -> f64 {
        self.coeffs.get(index).copied().unwrap_or(0.0)
    }

    pub fn coeffs(&self) -> impl Iterator<Item = (&MultiIndex, &f64)> {
        self.coeffs.iter()
    }

    pub fn num_terms(&self) -> usize {
        self.coeffs.len()
    }

    /// `E_μ[f]`: the coefficient of the zero multi-index.
    pub fn mean(&self) -> f64 {
        self.coeff(&MultiIndex::zero(self.dim))
    }

    /// Parseval: `E_μ[f²] = Σ_β c_β²`.
    pub fn parseval_norm_sq(&self) -> f64 {
        self.coeffs.values().map(|c| c * c).sum()
    }

    pub fn parseval_norm(&self) -> f64 {
        self.parseval_norm_sq().sqrt()
    }

    /// `Σ_β c_β Ψ_β(x)`.
    pub fn eval(&self, x: &[f64]) -> Result<f64> {
        if x.len() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                got: x.len(),
            });
        }
        let tables: Vec<Vec<f64>> = x
            .iter()
            .map(|&xi| hermite_values(self.max_degree, xi))
            .collect();
        let mut acc = 0.0;
        for (idx, &c) in &self.coeffs {
            let mut basis = 1.0;
            for (axis, &k) in idx.entries().iter().enumerate() {
                basis *= tables[axis][k as usize];
            }
            acc += c * basis;
        }
        Ok(acc)
    }

    /// `E_μ[fg] = Σ_β f_β g_β` (exact within truncation).
    pub fn inner_product(&self, other: &ChaosFn) -> Result<f64> {
        if other.dim != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                got: other.dim,
            });
        }
        // Iterate the sparser map for a deterministic, cheap reduction.
        let (small, large) = if self.coeffs.len() <= other.coeffs.len() {
            (&self.coeffs, &other.coeffs)
        } else {
            (&other.coeffs, &self.coeffs)
        };
        let mut acc = 0.0;
        for (idx, &c) in small {
            if let Some(&d) = large.get(idx) {
                acc += c * d;
            }
        }
        Ok(acc)
    }

    pub fn scaled(&self, s: f64) -> Self {
        let coeffs = self
            .coeffs
            .iter()
            .filter(|(_, &c)| c * s != 0.0)
            .map(|(idx, &c)| (idx.clone(), c * s))
            .collect();
        ChaosFn {
            dim: self.dim,
            max_degree: self.max_degree,
            coeffs,
        }
    }

    pub fn add(&self, other: &ChaosFn) -> Result<Self> {
        self.add_scaled(other, 1.0)
    }

    pub fn sub(&self, other: &ChaosFn) -> Result<Self> {
        self.add_scaled(other, -1.0)
    }

    /// `self + s·other`.
    pub fn add_scaled(&self, other: &ChaosFn, s: f64) -> Result<Self> {
        if other.dim != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                got: other.dim,
            });
        }
        let mut coeffs = self.coeffs.clone();
        for (idx, &c) in &other.coeffs {
            let slot = coeffs.entry(idx.clone()).or_insert(0.0);
            *slot += s * c;
            if *slot == 0.0 {
                coeffs.remove(idx);
            }
        }
        Ok(ChaosFn {
            dim: self.dim,
            max_degree: self.max_degree.max(other.max_degree),
            coeffs,
        })
    }

    /// `f − E_μ[f]`.
    pub fn centered(&self) -> Self {
        let mut out = self.clone();
        out.coeffs.remove(&MultiIndex::zero(self.dim));
        out
    }

    /// Replace the mean coefficient.
    pub fn with_mean(&self, mean: f64) -> Self {
        let mut out = self.clone();
        if mean == 0.0 {
            out.coeffs.remove(&MultiIndex::zero(self.dim));
        } else {
            out.coeffs.insert(MultiIndex::zero(self.dim), mean);
        }
        out
    }

    /// Truncate to degree ≤ `d`; the flag reports whether any stored
    /// coefficient was dropped.
    pub fn truncated(&self, d: u32) -> (Self, bool) {
        let mut changed = false;
        let coeffs: BTreeMap<_, _> = self
            .coeffs
            .iter()
            .filter(|(idx, _)| {
                let keep = idx.degree() <= d;
                if !keep {
                    changed = true;
                }
                keep
            })
            .map(|(idx, &c)| (idx.clone(), c))
            .collect();
        (
            ChaosFn {
                dim: self.dim,
                max_degree: d,
                coeffs,
            },
            changed,
        )
    }

    /// Same coefficients with a (weakly larger) declared degree bound.
    pub fn with_max_degree(&self, d: u32) -> Self {
        debug_assert!(self.coeffs.keys().all(|idx| idx.degree() <= d));
        ChaosFn {
            dim: self.dim,
            max_degree: d,
            coeffs: self.coeffs.clone(),
        }
    }

    /// Largest |coefficient| difference against `other`.
    pub fn max_coeff_distance(&self, other: &ChaosFn) -> f64 {
        let mut worst: f64 = 0.0;
        for (idx, &c) in &self.coeffs {
            worst = worst.max((c - other.coeff(idx)).abs());
        }
        for (idx, &c) in &other.coeffs {
            if !self.coeffs.contains_key(idx) {
                worst = worst.max(c.abs());
            }
        }
        worst
    }
}

/// An `ℝⁿ`-valued field `u: ℝⁿ → ℝⁿ`, one [`ChaosFn`] per coordinate — the
/// object `u` in the representation `Iu = α`.
#[derive(Debug, Clone, PartialEq)]
pub struct VectorField {
    dim: usize,
    components: Vec<ChaosFn>,
}

impl VectorField {
    pub fn new(components: Vec<ChaosFn>) -> Result<Self> {
        let dim = components.len();
        if dim == 0 {
            return Err(Error::InvalidParameter("empty vector field".into()));
        }
        for c in &components {
            if c.dim() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    got: c.dim(),
                });
            }
        }
        // Components share one declared degree bound.
        let d = components.iter().map(|c| c.max_degree()).max().unwrap();
        let components = components.into_iter().map(|c| c.with_max_degree(d)).collect();
        Ok(VectorField { dim, components })
    }

    pub fn zero(dim: usize, max_degree: u32) -> Self {
        VectorField {
            dim,
            components: (0..dim).map(|_| ChaosFn::zero(dim, max_degree)).collect(),
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn max_degree(&self) -> u32 {
        self.components.iter().map(|c| c.max_degree()).max().unwrap_or(0)
    }

    pub fn component(&self, axis: usize) -> &ChaosFn {
        &self.components[axis]
    }

    pub fn components(&self) -> &[ChaosFn] {
        &self.components
    }

    /// Componentwise evaluation `u(x) ∈ ℝⁿ`.
    pub fn eval(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.components.iter().map(|c| c.eval(x)).collect()
    }

    /// Pointwise H-norm `|u(x)|` (Euclidean norm of component values).
    pub fn norm_at(&self, x: &[f64]) -> Result<f64> {
        let v = self.eval(x)?;
        Ok(v.iter().map(|t| t * t).sum::<f64>().sqrt())
    }

    /// `E_μ|u|² = Σ_i ‖u_i‖²` by Parseval.
    pub fn parseval_norm_sq(&self) -> f64 {
        self.components.iter().map(|c| c.parseval_norm_sq()).sum()
    }

    /// `E_μ[⟨u, v⟩]` in coefficient arithmetic.
    pub fn inner_product(&self, other: &VectorField) -> Result<f64> {
        if other.dim != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                got: other.dim,
            });
        }
        let mut acc = 0.0;
        for (a, b) in self.components.iter().zip(&other.components) {
            acc += a.inner_product(b)?;
        }
        Ok(acc)
    }

    pub fn scaled(&self, s: f64) -> Self {
        VectorField {
            dim: self.dim,
            components: self.components.iter().map(|c| c.scaled(s)).collect(),
        }
    }

    /// `self + s·other`, componentwise.
    pub fn add_scaled(&self, other: &VectorField, s: f64) -> Result<Self> {
        if other.dim != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                got: other.dim,
            });
        }
        let components = self
            .components
            .iter()
            .zip(&other.components)
            .map(|(a, b)| a.add_scaled(b, s))
            .collect::<Result<Vec<_>>>()?;
        VectorField::new(components)
    }
}

/// Tensorized Gauss–Hermite rule for the standard Gaussian weight on `ℝⁿ`.
///
/// Exactly integrates every polynomial of per-axis degree ≤ `2q−1`; the
/// weights are positive and sum to 1. Nodes are enumerated row-major with
/// the last axis fastest, and every reduction over nodes runs in that fixed
/// order.
#[derive(Debug, Clone)]
pub struct QuadratureGrid {
    dim: usize,
    nodes_per_axis: usize,
    axis_nodes: Vec<f64>,
    axis_weights: Vec<f64>,
    nodes: Vec<Vec<f64>>,
    weights: Vec<f64>,
}

impl QuadratureGrid {
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn nodes_per_axis(&self) -> usize {
        self.nodes_per_axis
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn node(&self, j: usize) -> &[f64] {
        &self.nodes[j]
    }

    pub fn weight(&self, j: usize) -> f64 {
        self.weights[j]
    }

    pub fn nodes(&self) -> &[Vec<f64>] {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// The shared 1-D rule, `(nodes, weights)`.
    pub fn axis_rule(&self) -> (&[f64], &[f64]) {
        (&self.axis_nodes, &self.axis_weights)
    }

    /// Largest polynomial degree integrated exactly per axis.
    pub fn exactness_degree(&self) -> u32 {
        (2 * self.nodes_per_axis - 1) as u32
    }

    /// `Σ_j w_j f(x_j)` in node order.
    pub fn integrate<F: FnMut(&[f64]) -> f64>(&self, mut f: F) -> f64 {
        let mut acc = 0.0;
        for (node, &w) in self.nodes.iter().zip(&self.weights) {
            acc += w * f(node);
        }
        acc
    }
}

/// Gauss–Hermite nodes and weights for the standard Gaussian weight,
/// tensorized over `dim` axes.
///
/// The 1-D rule comes from Golub–Welsch: eigenvalues of the symmetric
/// tridiagonal Jacobi matrix of the orthonormal recurrence (off-diagonal
/// `√k`), with weights given by the squared first components of the
/// normalized eigenvectors.
pub fn gauss_hermite_grid(dim: usize, nodes_per_axis: usize) -> Result<QuadratureGrid> {
    if dim == 0 {
        return Err(Error::InvalidParameter("grid dimension must be ≥ 1".into()));
    }
    if nodes_per_axis == 0 {
        return Err(Error::InvalidParameter(
            "nodes_per_axis must be ≥ 1".into(),
        ));
    }
    let q = nodes_per_axis;
    let (axis_nodes, axis_weights) = gauss_hermite_rule_1d(q)?;

    let total = q
        .checked_pow(dim as u32)
        .ok_or_else(|| Error::ResourceGuard("tensor grid size overflow".into()))?;
    if total > 2_000_000 {
        return Err(Error::ResourceGuard(format!(
            "tensor grid with {total} nodes exceeds the 2e6 node guard"
        )));
    }

    let mut nodes = Vec::with_capacity(total);
    let mut weights = Vec::with_capacity(total);
    for flat in 0..total {
        let mut point = vec![0.0; dim];
        let mut w = 1.0;
        let mut rem = flat;
        for axis in (0..dim).rev() {
            let digit = rem % q;
            rem /= q;
            point[axis] = axis_nodes[digit];
            w *= axis_weights[digit];
        }
        nodes.push(point);
        weights.push(w);
    }

    Ok(QuadratureGrid {
        dim,
        nodes_per_axis,
        axis_nodes,
        axis_weights,
        nodes,
        weights,
    })
}

fn gauss_hermite_rule_1d(q: usize) -> Result<(Vec<f64>, Vec<f64>)> {
    if q == 1 {
        return Ok((vec![0.0], vec![1.0]));
    }
    let mut jacobi = DMatrix::<f64>::zeros(q, q);
    for k in 1..q {
        let b = (k as f64).sqrt();
        jacobi[(k - 1, k)] = b;
        jacobi[(k, k - 1)] = b;
    }
    let eig = nalgebra::SymmetricEigen::try_new(jacobi, f64::EPSILON, 50_000)
        .ok_or(Error::EigenFailure)?;

    let mut pairs: Vec<(f64, f64)> = (0..q)
        .map(|i| {
            let node = eig.eigenvalues[i];
            let w = eig.eigenvectors[(0, i)].powi(2);
            (node, w)
        })
        .collect();
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0));

    let total: f64 = pairs.iter().map(|p| p.1).sum();
    let defect = (total - 1.0).abs();
    if !defect.is_finite() || defect > 1e-12 {
        return Err(Error::Solver(format!(
            "Gauss–Hermite weights sum to {total}, expected 1 within 1e-12"
        )));
    }
    let nodes = pairs.iter().map(|p| p.0).collect();
    let weights = pairs.iter().map(|p| p.1).collect();
    Ok((nodes, weights))
}

/// Quadrature-based projection onto the chaos basis:
/// `c_β = Σ_j w_j · sampler(x_j) · Ψ_β(x_j)`, truncated at `max_degree`.
///
/// Emits a warning when the grid cannot integrate `Ψ_β²` exactly
/// (exactness below `2·max_degree`); results are then quadrature-biased.
pub fn project<F>(
    mut sampler: F,
    dim: usize,
    max_degree: u32,
    grid: &QuadratureGrid,
) -> Result<ChaosFn>
where
    F: FnMut(&[f64]) -> f64,
{
    if grid.dim() != dim {
        return Err(Error::DimensionMismatch {
            expected: dim,
            got: grid.dim(),
        });
    }
    let values: Vec<f64> = grid.nodes().iter().map(|node| sampler(node)).collect();
    project_node_values(&values, dim, max_degree, grid)
}

/// Projection from values already tabulated at the grid nodes, in node order.
pub fn project_node_values(
    values: &[f64],
    dim: usize,
    max_degree: u32,
    grid: &QuadratureGrid,
) -> Result<ChaosFn> {
    if grid.dim() != dim {
        return Err(Error::DimensionMismatch {
            expected: dim,
            got: grid.dim(),
        });
    }
    if values.len() != grid.len() {
        return Err(Error::DimensionMismatch {
            expected: grid.len(),
            got: values.len(),
        });
    }
    if grid.exactness_degree() < 2 * max_degree {
        eprintln!(
            "warning: projection at degree {} on a grid exact only to degree {}",
            max_degree,
            grid.exactness_degree()
        );
    }
    let indices = multi_indices(dim, max_degree);
    let mut acc = vec![0.0; indices.len()];
    for ((node, &w), &value) in grid.nodes().iter().zip(grid.weights()).zip(values) {
        if !value.is_finite() {
            return Err(Error::NonFinite {
                context: "sampler value at quadrature node".into(),
            });
        }
        let tables: Vec<Vec<f64>> = node
            .iter()
            .map(|&xi| hermite_values(max_degree, xi))
            .collect();
        let wv = w * value;
        for (slot, idx) in acc.iter_mut().zip(&indices) {
            let mut basis = 1.0;
            for (axis, &k) in idx.entries().iter().enumerate() {
                basis *= tables[axis][k as usize];
            }
            *slot += wv * basis;
        }
    }
    ChaosFn::from_coeffs(
        dim,
        max_degree,
        indices.into_iter().zip(acc).filter(|(_, c)| *c != 0.0),
    )
}

/// Random expansion with i.i.d. standard normal coefficients scaled by
/// `scale`, over every index of degree ≤ `max_degree`. Used by the operator
/// verification suites and the test batteries.
pub fn random_chaos_fn<R: rand::Rng>(
    dim: usize,
    max_degree: u32,
    scale: f64,
    rng: &mut R,
) -> ChaosFn {
    use rand_distr::{Distribution, StandardNormal};
    let entries: Vec<(MultiIndex, f64)> = multi_indices(dim, max_degree)
        .into_iter()
        .map(|idx| {
            let z: f64 = StandardNormal.sample(rng);
            (idx, scale * z)
        })
        .collect();
    ChaosFn::from_coeffs(dim, max_degree, entries).expect("indices within bound")
}
