//! The operator toolkit on chaos expansions: stochastic derivative `D`,
//! divergence `I` (adjoint of `D`), number operator `L = ID`,
//! Ornstein–Uhlenbeck semigroup `T_t`, the minimal-norm representer of
//! `Iu = α − Eα`, and the `(1+L)⁻¹Dα` field.
//!
//! Everything is realized spectrally on the orthonormal Hermite basis:
//! `D` lowers the chaos order, `I` raises it, `L` and `T_t` are diagonal.
//! The Mehler integral form of `T_t` and finite differences of `D` serve
//! as independent cross-checks of the spectral actions.

use crate::chaos::{multi_indices, ChaosFn, MultiIndex, QuadratureGrid, VectorField};
use crate::{Error, Result};

/// Stochastic derivative `D`: component `i` of `Df` carries the coefficient
/// `√(β_i+1)·f_{β+e_i}` at index `β` (from `∂ h_k = √k·h_{k−1}`). The chaos
/// order drops by one.
pub fn derivative(f: &ChaosFn) -> VectorField {
    let dim = f.dim();
    let out_degree = f.max_degree().saturating_sub(1);
    let mut comps: Vec<Vec<(MultiIndex, f64)>> = vec![Vec::new(); dim];
    for (idx, &c) in f.coeffs() {
        for (axis, comp) in comps.iter_mut().enumerate() {
            if let Some(lower) = idx.lowered(axis) {
                let k = idx.entry(axis) as f64;
                comp.push((lower, k.sqrt() * c));
            }
        }
    }
    let components = comps
        .into_iter()
        .map(|entries| ChaosFn::from_coeffs(dim, out_degree, entries).expect("degree bookkeeping"))
        .collect();
    VectorField::new(components).expect("component count matches dim")
}

/// Divergence `I = D*`: the coefficient at `β` receives
/// `Σ_i √β_i · u_i[β−e_i]`. The chaos order rises by one and the output is
/// mean-zero by construction.
pub fn divergence(u: &VectorField) -> ChaosFn {
    let dim = u.dim();
    let out_degree = u.max_degree() + 1;
    let mut entries: Vec<(MultiIndex, f64)> = Vec::new();
    for (axis, comp) in u.components().iter().enumerate() {
        for (idx, &c) in comp.coeffs() {
            let raised = idx.raised(axis);
            let k = raised.entry(axis) as f64;
            entries.push((raised, k.sqrt() * c));
        }
    }
    // Merge duplicate target indices deterministically.
    let mut merged: std::collections::BTreeMap<MultiIndex, f64> = std::collections::BTreeMap::new();
    for (idx, c) in entries {
        *merged.entry(idx).or_insert(0.0) += c;
    }
    ChaosFn::from_coeffs(dim, out_degree, merged).expect("degree bookkeeping")
}

/// Number operator `L = ID`: multiplies the coefficient at `β` by `|β|`.
pub fn number_operator(f: &ChaosFn) -> ChaosFn {
    let entries: Vec<_> = f
        .coeffs()
        .map(|(idx, &c)| (idx.clone(), idx.degree() as f64 * c))
        .collect();
    ChaosFn::from_coeffs(f.dim(), f.max_degree(), entries).expect("degrees unchanged")
}

/// Ornstein–Uhlenbeck semigroup `T_t`, spectral form: the coefficient at
/// `β` is scaled by `e^{−t·|β|}`.
pub fn ou_semigroup(f: &ChaosFn, t: f64) -> Result<ChaosFn> {
    if t.is_nan() || t < 0.0 {
        return Err(Error::InvalidParameter(format!(
            "semigroup time must be ≥ 0, got {t}"
        )));
    }
    let entries: Vec<_> = f
        .coeffs()
        .map(|(idx, &c)| (idx.clone(), (-t * idx.degree() as f64).exp() * c))
        .collect();
    Ok(ChaosFn::from_coeffs(f.dim(), f.max_degree(), entries).expect("degrees unchanged"))
}

/// `T_t` applied componentwise to a vector field.
pub fn ou_semigroup_field(u: &VectorField, t: f64) -> Result<VectorField> {
    let components = u
        .components()
        .iter()
        .map(|c| ou_semigroup(c, t))
        .collect::<Result<Vec<_>>>()?;
    VectorField::new(components)
}

/// `T_t` by the Mehler integral
/// `T_t f(x) = Σ_j w_j f(e^{−t}x + √(1−e^{−2t})·y_j)`, re-projected onto
/// the chaos basis. Serves as an independent oracle for [`ou_semigroup`].
///
/// On a tensor grid the inner integral factorizes per axis, so the sum is
/// evaluated axiswise; the result is identical to the full tensor sum.
pub fn mehler_apply(f: &ChaosFn, t: f64, grid: &QuadratureGrid) -> Result<ChaosFn> {
    if t.is_nan() || t <= 0.0 {
        return Err(Error::InvalidParameter(format!(
            "Mehler form needs t > 0, got {t}"
        )));
    }
    if grid.dim() != f.dim() {
        return Err(Error::DimensionMismatch {
            expected: f.dim(),
            got: grid.dim(),
        });
    }
    let d = f.max_degree();
    let damp = (-t).exp();
    let spread = (1.0 - (-2.0 * t).exp()).sqrt();
    let (axis_nodes, axis_weights) = grid.axis_rule();
    let q = axis_nodes.len();

    // axis_integral[j][k] = Σ_l w_l · h_k(e^{−t}·ξ_j + spread·ξ_l)
    let mut axis_integral = vec![vec![0.0; d as usize + 1]; q];
    for (j, &xj) in axis_nodes.iter().enumerate() {
        for (l, &yl) in axis_nodes.iter().enumerate() {
            let point = damp * xj + spread * yl;
            let table = crate::chaos::hermite_values(d, point);
            for (k, &hk) in table.iter().enumerate() {
                axis_integral[j][k] += axis_weights[l] * hk;
            }
        }
    }

    let dim = f.dim();
    let mut values = Vec::with_capacity(grid.len());
    for flat in 0..grid.len() {
        let mut digits = vec![0usize; dim];
        let mut rem = flat;
        for axis in (0..dim).rev() {
            digits[axis] = rem % q;
            rem /= q;
        }
        let mut acc = 0.0;
        for (idx, &c) in f.coeffs() {
            let mut term = c;
            for (axis, &k) in idx.entries().iter().enumerate() {
                term *= axis_integral[digits[axis]][k as usize];
            }
            acc += term;
        }
        values.push(acc);
    }
    crate::chaos::project_node_values(&values, dim, d, grid)
}

/// Minimal-norm representer of `Iu = α − Eα`: drop the mean, divide the
/// coefficient at each `β` by `|β|`, apply `D`. This realizes `D L⁻¹(α−Eα)`,
/// using `∫₀^∞ e^{−kt} dt = 1/k` to collapse the time integral.
pub fn min_norm_field(alpha: &ChaosFn) -> VectorField {
    let centered = alpha.centered();
    let entries: Vec<_> = centered
        .coeffs()
        .map(|(idx, &c)| (idx.clone(), c / idx.degree() as f64))
        .collect();
    let scaled =
        ChaosFn::from_coeffs(alpha.dim(), alpha.max_degree(), entries).expect("degrees unchanged");
    derivative(&scaled)
}

/// The `(1+L)⁻¹Dα` divergence preimage: apply `D`, then divide the
/// coefficient at each `β` by `1 + |β|` componentwise. Satisfies
/// `I(result) = α − Eα`.
pub fn feyel_ustunel_field(alpha: &ChaosFn) -> VectorField {
    let grad = derivative(alpha);
    let components = grad
        .components()
        .iter()
        .map(|comp| {
            let entries: Vec<_> = comp
                .coeffs()
                .map(|(idx, &c)| (idx.clone(), c / (1.0 + idx.degree() as f64)))
                .collect();
            ChaosFn::from_coeffs(comp.dim(), comp.max_degree(), entries).expect("degrees unchanged")
        })
        .collect();
    VectorField::new(components).expect("component count preserved")
}

/// Orthonormal spanning set of the null space of `I` restricted to vector
/// fields of degree ≤ `max_degree`.
///
/// The coefficient matrix of `I` on the basis fields is one-sparse per
/// column: the basis field `(i, γ)` maps to `√(γ_i+1)·Ψ_{γ+e_i}`. Columns
/// therefore group by their target index `β`, and the null space is the
/// direct sum over `β` of the orthogonal complements of the in-group
/// coefficient vectors `(√β_i)_i`. Each complement comes from a Householder
/// reflection, so the returned fields are exactly orthonormal.
pub fn kernel_basis(dim: usize, max_degree: u32) -> Result<Vec<VectorField>> {
    let indices = multi_indices(dim, max_degree);
    let unknowns = dim * indices.len();
    if unknowns > 20_000 {
        return Err(Error::ResourceGuard(format!(
            "kernel basis with {unknowns} unknowns exceeds the 20000 guard"
        )));
    }

    let mut basis = Vec::new();
    // Iterate target indices in graded order for a deterministic basis.
    for target in multi_indices(dim, max_degree + 1) {
        if target.degree() == 0 {
            continue;
        }
        let group: Vec<usize> = (0..dim).filter(|&i| target.entry(i) >= 1).collect();
        if group.len() < 2 {
            continue;
        }
        let a: Vec<f64> = group
            .iter()
            .map(|&i| (target.entry(i) as f64).sqrt())
            .collect();
        for tangent in householder_complement(&a) {
            let mut components = vec![ChaosFn::zero(dim, max_degree); dim];
            for (slot, &axis) in group.iter().enumerate() {
                let c = tangent[slot];
                if c != 0.0 {
                    let source = target.lowered(axis).expect("entry ≥ 1 in group");
                    components[axis] =
                        ChaosFn::from_coeffs(dim, max_degree, [(source, c)])
                            .expect("degree ≤ max_degree");
                }
            }
            basis.push(VectorField::new(components)?);
        }
    }
    Ok(basis)
}

/// Orthonormal basis of the orthogonal complement of `a` in ℝ^g
/// (g = a.len()), from the Householder reflection sending `e_1` to `a/|a|`.
fn householder_complement(a: &[f64]) -> Vec<Vec<f64>> {
    let g = a.len();
    let norm = a.iter().map(|t| t * t).sum::<f64>().sqrt();
    debug_assert!(norm > 0.0);
    let unit: Vec<f64> = a.iter().map(|t| t / norm).collect();

    // v = unit − e_1, H = I − 2vvᵀ/|v|²; columns 2..g of H span unit⊥.
    let mut v = unit.clone();
    v[0] -= 1.0;
    let vnorm_sq: f64 = v.iter().map(|t| t * t).sum();
    let mut out = Vec::with_capacity(g - 1);
    for col in 1..g {
        let mut column = vec![0.0; g];
        column[col] = 1.0;
        if vnorm_sq > 0.0 {
            let factor = 2.0 * v[col] / vnorm_sq;
            for row in 0..g {
                column[row] -= factor * v[row];
            }
        }
        out.push(column);
    }
    out
}

/// The affine solution set of `Iu = α − Eα` within degree ≤ `d`:
/// a particular solution plus an orthonormal basis of `ker I`.
#[derive(Debug, Clone)]
pub struct SolutionFamily {
    /// The minimal-L² particular solution.
    pub base: VectorField,
    /// Orthonormal basis of `ker I` on fields of degree ≤ `d`.
    pub kernel_basis: Vec<VectorField>,
}

impl SolutionFamily {
    /// `base + Σ_j c_j·w_j`.
    pub fn member(&self, coords: &[f64]) -> Result<VectorField> {
        if coords.len() != self.kernel_basis.len() {
            return Err(Error::DimensionMismatch {
                expected: self.kernel_basis.len(),
                got: coords.len(),
            });
        }
        let mut u = self.base.clone();
        for (w, &c) in self.kernel_basis.iter().zip(coords) {
            if c != 0.0 {
                u = u.add_scaled(w, c)?;
            }
        }
        Ok(u)
    }
}

/// Solution family for `Iu = α − Eα` truncated at degree `d`.
pub fn solution_family(alpha: &ChaosFn, d: u32) -> Result<SolutionFamily> {
    if alpha.max_degree() > d {
        return Err(Error::InvalidParameter(format!(
            "density degree {} exceeds requested family degree {}",
            alpha.max_degree(),
            d
        )));
    }
    let base = min_norm_field(alpha);
    // Align the base's declared degree with the kernel fields.
    let base = VectorField::new(
        base.components()
            .iter()
            .map(|c| c.with_max_degree(d))
            .collect(),
    )?;
    let kernel = kernel_basis(alpha.dim(), d)?;
    Ok(SolutionFamily {
        base,
        kernel_basis: kernel,
    })
}
