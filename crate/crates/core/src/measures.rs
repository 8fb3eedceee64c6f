//! Finite Gaussian mixtures on `ℝⁿ`: exact densities relative to the
//! standard Gaussian `μ`, exact Ornstein–Uhlenbeck smoothing, ε-mixing
//! with `μ`, coordinate projection, conditional expectation of chaos
//! expansions, and seeded sampling.
//!
//! Mixtures are the working measure class because they are closed under
//! all of the above and give closed-form density ratios. Components with
//! singular covariance (point masses) are admitted in storage but rejected
//! by density evaluation; smoothing with any `t > 0` regularizes them.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::chaos::{project, ChaosFn, MultiIndex, QuadratureGrid};
use crate::{Error, Result};

/// One mixture component `(weight, mean, covariance)`.
#[derive(Debug, Clone)]
pub struct MixtureComponent {
    pub weight: f64,
    pub mean: DVector<f64>,
    pub cov: DMatrix<f64>,
    inv: Option<DMatrix<f64>>,
    log_det: Option<f64>,
    sqrt: DMatrix<f64>,
}

impl MixtureComponent {
    fn build(weight: f64, mean: DVector<f64>, cov: DMatrix<f64>) -> Result<Self> {
        let n = mean.len();
        if cov.nrows() != n || cov.ncols() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                got: cov.nrows(),
            });
        }
        if weight.is_nan() || weight <= 0.0 || !weight.is_finite() {
            return Err(Error::InvalidMeasure(format!(
                "component weight must be positive and finite, got {weight}"
            )));
        }
        if mean.iter().any(|v| !v.is_finite()) || cov.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidMeasure("non-finite mean or covariance".into()));
        }
        let scale = cov.iter().fold(1.0_f64, |m, v| m.max(v.abs()));
        for i in 0..n {
            for j in 0..i {
                if (cov[(i, j)] - cov[(j, i)]).abs() > 1e-12 * scale {
                    return Err(Error::InvalidMeasure(
                        "covariance matrix is not symmetric".into(),
                    ));
                }
            }
        }
        let eig = nalgebra::SymmetricEigen::try_new(cov.clone(), f64::EPSILON, 50_000)
            .ok_or(Error::EigenFailure)?;
        if eig.eigenvalues.iter().any(|&l| l < -1e-12) {
            return Err(Error::InvalidMeasure(
                "covariance matrix has a negative eigenvalue".into(),
            ));
        }
        // Spectral square root, valid also for singular components.
        let sqrt_diag = DMatrix::from_diagonal(&eig.eigenvalues.map(|l| l.max(0.0).sqrt()));
        let sqrt = &eig.eigenvectors * sqrt_diag * eig.eigenvectors.transpose();

        let (inv, log_det) = match nalgebra::Cholesky::new(cov.clone()) {
            Some(chol) => {
                let log_det = 2.0 * chol.l().diagonal().iter().map(|d| d.ln()).sum::<f64>();
                (Some(chol.inverse()), Some(log_det))
            }
            None => (None, None),
        };
        Ok(MixtureComponent {
            weight,
            mean,
            cov,
            inv,
            log_det,
            sqrt,
        })
    }
}

/// Finite mixture of Gaussians on `ℝⁿ` with weights summing to one.
#[derive(Debug, Clone)]
pub struct GaussianMixture {
    dim: usize,
    components: Vec<MixtureComponent>,
}

/// On-disk measure description (`{"dim": n, "components": [...]}`).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MeasureSpec {
    pub dim: usize,
    pub components: Vec<ComponentSpec>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ComponentSpec {
    pub weight: f64,
    pub mean: Vec<f64>,
    pub cov: Vec<Vec<f64>>,
}

impl GaussianMixture {
    pub fn new(dim: usize, parts: Vec<(f64, Vec<f64>, Vec<Vec<f64>>)>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidMeasure("dimension must be ≥ 1".into()));
        }
        if parts.is_empty() {
            return Err(Error::InvalidMeasure("mixture needs ≥ 1 component".into()));
        }
        let mut components = Vec::with_capacity(parts.len());
        for (weight, mean, cov) in parts {
            if mean.len() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    got: mean.len(),
                });
            }
            let rows = cov.len();
            if rows != dim || cov.iter().any(|r| r.len() != dim) {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    got: rows,
                });
            }
            let flat: Vec<f64> = cov.iter().flatten().copied().collect();
            components.push(MixtureComponent::build(
                weight,
                DVector::from_vec(mean),
                DMatrix::from_row_slice(dim, dim, &flat),
            )?);
        }
        let total = kahan_sum(components.iter().map(|c| c.weight));
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidMeasure(format!(
                "weights sum to {total}, expected 1 within 1e-12"
            )));
        }
        Ok(GaussianMixture { dim, components })
    }

    /// The standard Gaussian `μ = N(0, Id)`.
    pub fn standard(dim: usize) -> Self {
        GaussianMixture::new(
            dim,
            vec![(1.0, vec![0.0; dim], identity_rows(dim))],
        )
        .expect("standard Gaussian is valid")
    }

    /// Single Gaussian `N(mean, cov)`.
    pub fn gaussian(mean: Vec<f64>, cov: Vec<Vec<f64>>) -> Result<Self> {
        let dim = mean.len();
        GaussianMixture::new(dim, vec![(1.0, mean, cov)])
    }

    /// Point mass at `z` (stored with zero covariance).
    pub fn point_mass(z: Vec<f64>) -> Result<Self> {
        let dim = z.len();
        GaussianMixture::new(dim, vec![(1.0, z, vec![vec![0.0; dim]; dim])])
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn components(&self) -> &[MixtureComponent] {
        &self.components
    }

    pub fn from_spec(spec: &MeasureSpec) -> Result<Self> {
        GaussianMixture::new(
            spec.dim,
            spec.components
                .iter()
                .map(|c| (c.weight, c.mean.clone(), c.cov.clone()))
                .collect(),
        )
    }

    pub fn to_spec(&self) -> MeasureSpec {
        MeasureSpec {
            dim: self.dim,
            components: self
                .components
                .iter()
                .map(|c| ComponentSpec {
                    weight: c.weight,
                    mean: c.mean.iter().copied().collect(),
                    cov: (0..self.dim)
                        .map(|i| (0..self.dim).map(|j| c.cov[(i, j)]).collect())
                        .collect(),
                })
                .collect(),
        }
    }

    pub fn load_json(path: &std::path::Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let spec: MeasureSpec = serde_json::from_str(&text)?;
        GaussianMixture::from_spec(&spec)
    }

    pub fn save_json(&self, path: &std::path::Path) -> Result<()> {
        let text = serde_json::to_string_pretty(&self.to_spec())?;
        std::fs::write(path, text)?;
        Ok(())
    }

    /// Density of the mixture relative to the standard Gaussian,
    /// `(Σ_k w_k N(x; m_k, Σ_k)) / N(x; 0, Id)`.
    ///
    /// Errors when any component covariance is singular.
    pub fn density_vs_mu(&self, x: &[f64]) -> Result<f64> {
        if x.len() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                got: x.len(),
            });
        }
        let xv = DVector::from_column_slice(x);
        let x_sq = xv.dot(&xv);
        let mut total = 0.0;
        for comp in &self.components {
            let (inv, log_det) = match (&comp.inv, comp.log_det) {
                (Some(inv), Some(ld)) => (inv, ld),
                _ => return Err(Error::SingularCovariance),
            };
            let centered = &xv - &comp.mean;
            let quad = (inv * &centered).dot(&centered);
            // log[N(x; m, Σ)/N(x; 0, I)] = ½|x|² − ½ quad − ½ log det Σ
            let log_ratio = 0.5 * (x_sq - quad - log_det);
            total += comp.weight * log_ratio.exp();
        }
        Ok(total)
    }

    /// Ornstein–Uhlenbeck smoothing of the measure: each component
    /// `(w, m, Σ) ↦ (w, e^{−t}m, e^{−2t}Σ + (1−e^{−2t})·Id)`.
    pub fn ou_smooth(&self, t: f64) -> Result<GaussianMixture> {
        if t.is_nan() || t < 0.0 {
            return Err(Error::InvalidParameter(format!(
                "smoothing time must be ≥ 0, got {t}"
            )));
        }
        let damp = (-t).exp();
        let var_fill = 1.0 - (-2.0 * t).exp();
        let parts = self
            .components
            .iter()
            .map(|c| {
                let mean = (&c.mean * damp).iter().copied().collect();
                let mut cov = &c.cov * (damp * damp);
                for i in 0..self.dim {
                    cov[(i, i)] += var_fill;
                }
                let rows = (0..self.dim)
                    .map(|i| (0..self.dim).map(|j| cov[(i, j)]).collect())
                    .collect();
                (c.weight, mean, rows)
            })
            .collect();
        GaussianMixture::new(self.dim, parts)
    }

    /// ε-mix with the standard Gaussian: `(ν + ε·μ)/(1+ε)`. The resulting
    /// density relative to `μ` is ≥ `ε/(1+ε)` everywhere.
    pub fn epsilon_mix(&self, epsilon: f64) -> Result<GaussianMixture> {
        if epsilon.is_nan() || epsilon <= 0.0 {
            return Err(Error::InvalidParameter(format!(
                "mixing ε must be > 0, got {epsilon}"
            )));
        }
        let scale = 1.0 / (1.0 + epsilon);
        let mut parts: Vec<(f64, Vec<f64>, Vec<Vec<f64>>)> = self
            .components
            .iter()
            .map(|c| {
                (
                    c.weight * scale,
                    c.mean.iter().copied().collect(),
                    (0..self.dim)
                        .map(|i| (0..self.dim).map(|j| c.cov[(i, j)]).collect())
                        .collect(),
                )
            })
            .collect();
        parts.push((epsilon * scale, vec![0.0; self.dim], identity_rows(self.dim)));
        GaussianMixture::new(self.dim, parts)
    }

    /// Pushforward under `x ↦ (x₁, …, x_k)`: leading sub-vectors of the
    /// means and leading `k×k` blocks of the covariances.
    pub fn project(&self, k: usize) -> Result<GaussianMixture> {
        if k == 0 || k > self.dim {
            return Err(Error::InvalidParameter(format!(
                "projection dimension {k} outside 1..={}",
                self.dim
            )));
        }
        let parts = self
            .components
            .iter()
            .map(|c| {
                (
                    c.weight,
                    c.mean.iter().take(k).copied().collect(),
                    (0..k)
                        .map(|i| (0..k).map(|j| c.cov[(i, j)]).collect())
                        .collect(),
                )
            })
            .collect();
        GaussianMixture::new(k, parts)
    }

    /// `count` i.i.d. draws with uniform weights `1/count`; component chosen
    /// by weight, then a Gaussian draw through the spectral square root.
    pub fn sample<R: rand::Rng>(&self, count: usize, rng: &mut R) -> Result<DiscreteMeasure> {
        use rand_distr::{Distribution, StandardNormal};
        if count == 0 {
            return Err(Error::InvalidParameter("sample count must be ≥ 1".into()));
        }
        let mut atoms = Vec::with_capacity(count);
        for _ in 0..count {
            let pick: f64 = rng.random_range(0.0..1.0);
            let mut acc = 0.0;
            let mut chosen = self.components.len() - 1;
            for (idx, comp) in self.components.iter().enumerate() {
                acc += comp.weight;
                if pick < acc {
                    chosen = idx;
                    break;
                }
            }
            let comp = &self.components[chosen];
            let z = DVector::from_iterator(
                self.dim,
                (0..self.dim).map(|_| StandardNormal.sample(rng)),
            );
            let x = &comp.mean + &comp.sqrt * z;
            atoms.push(x.iter().copied().collect());
        }
        DiscreteMeasure::uniform(self.dim, atoms)
    }
}

fn identity_rows(dim: usize) -> Vec<Vec<f64>> {
    (0..dim)
        .map(|i| (0..dim).map(|j| if i == j { 1.0 } else { 0.0 }).collect())
        .collect()
}

/// Compensated sum; the 1e-12 weight-total invariants need it for large
/// uniform clouds where naive accumulation drifts past the tolerance.
fn kahan_sum<I: Iterator<Item = f64>>(values: I) -> f64 {
    let mut sum = 0.0;
    let mut carry = 0.0;
    for v in values {
        let y = v - carry;
        let t = sum + y;
        carry = (t - sum) - y;
        sum = t;
    }
    sum
}

/// Conditional expectation of a chaos expansion given the first `k`
/// coordinates: keep exactly the coefficients whose multi-index vanishes on
/// coordinates `k+1..n` (orthogonal projection, so the Parseval norm never
/// increases).
pub fn conditional_expectation(f: &ChaosFn, k: usize) -> Result<ChaosFn> {
    if k == 0 || k > f.dim() {
        return Err(Error::InvalidParameter(format!(
            "conditioning dimension {k} outside 1..={}",
            f.dim()
        )));
    }
    let entries: Vec<_> = f
        .coeffs()
        .filter(|(idx, _)| idx.entries()[k..].iter().all(|&e| e == 0))
        .map(|(idx, &c)| (idx.clone(), c))
        .collect();
    ChaosFn::from_coeffs(f.dim(), f.max_degree(), entries)
}

/// Re-interpret a chaos expansion that depends only on the first `k`
/// coordinates as an expansion on `ℝᵏ`.
pub fn restrict_chaos(f: &ChaosFn, k: usize) -> Result<ChaosFn> {
    if k == 0 || k > f.dim() {
        return Err(Error::InvalidParameter(format!(
            "restriction dimension {k} outside 1..={}",
            f.dim()
        )));
    }
    let mut entries = Vec::new();
    for (idx, &c) in f.coeffs() {
        if idx.entries()[k..].iter().any(|&e| e != 0) {
            return Err(Error::InvalidParameter(
                "expansion depends on a dropped coordinate".into(),
            ));
        }
        entries.push((MultiIndex::new(idx.entries()[..k].to_vec()), c));
    }
    ChaosFn::from_coeffs(k, f.max_degree(), entries)
}

/// Embed an expansion on `ℝᵏ` into `ℝⁿ` (depending only on the first `k`
/// coordinates).
pub fn lift_chaos(f: &ChaosFn, n: usize) -> Result<ChaosFn> {
    if n < f.dim() {
        return Err(Error::InvalidParameter(format!(
            "cannot lift dimension {} into {}",
            f.dim(),
            n
        )));
    }
    let entries: Vec<_> = f
        .coeffs()
        .map(|(idx, &c)| {
            let mut e = idx.entries().to_vec();
            e.resize(n, 0);
            (MultiIndex::new(e), c)
        })
        .collect();
    ChaosFn::from_coeffs(n, f.max_degree(), entries)
}

/// Chaos projection of `d(ν₁ − ν₀)/dμ` at degree `d`, with the mean
/// coefficient re-zeroed. Returns the expansion and the magnitude of the
/// mean adjustment (a quadrature/truncation diagnostic).
pub fn difference_density_chaos(
    nu1: &GaussianMixture,
    nu0: &GaussianMixture,
    d: u32,
    grid: &QuadratureGrid,
) -> Result<(ChaosFn, f64)> {
    if nu0.dim() != nu1.dim() {
        return Err(Error::DimensionMismatch {
            expected: nu1.dim(),
            got: nu0.dim(),
        });
    }
    let mut failure: Option<Error> = None;
    let alpha = project(
        |x| {
            match (nu1.density_vs_mu(x), nu0.density_vs_mu(x)) {
                (Ok(a), Ok(b)) => a - b,
                (Err(e), _) | (_, Err(e)) => {
                    failure.get_or_insert(e);
                    f64::NAN
                }
            }
        },
        nu1.dim(),
        d,
        grid,
    );
    if let Some(e) = failure {
        return Err(e);
    }
    let alpha = alpha?;
    let adjustment = alpha.mean().abs();
    Ok((alpha.centered(), adjustment))
}

/// Weighted atom cloud — the input to the discrete transport oracles.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteMeasure {
    dim: usize,
    atoms: Vec<Vec<f64>>,
    weights: Vec<f64>,
}

impl DiscreteMeasure {
    pub fn new(dim: usize, atoms: Vec<Vec<f64>>, weights: Vec<f64>) -> Result<Self> {
        if atoms.len() != weights.len() {
            return Err(Error::DimensionMismatch {
                expected: atoms.len(),
                got: weights.len(),
            });
        }
        if atoms.is_empty() {
            return Err(Error::InvalidMeasure("empty atom cloud".into()));
        }
        for a in &atoms {
            if a.len() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    got: a.len(),
                });
            }
            if a.iter().any(|v| !v.is_finite()) {
                return Err(Error::InvalidMeasure("non-finite atom".into()));
            }
        }
        if weights.iter().any(|&w| w.is_nan() || w <= 0.0 || !w.is_finite()) {
            return Err(Error::InvalidMeasure("weights must be positive".into()));
        }
        let total = kahan_sum(weights.iter().copied());
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidMeasure(format!(
                "weights sum to {total}, expected 1 within 1e-12"
            )));
        }
        Ok(DiscreteMeasure {
            dim,
            atoms,
            weights,
        })
    }

    pub fn uniform(dim: usize, atoms: Vec<Vec<f64>>) -> Result<Self> {
        let n = atoms.len();
        DiscreteMeasure::new(dim, atoms, vec![1.0 / n as f64; n])
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.atoms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }

    pub fn atom(&self, i: usize) -> &[f64] {
        &self.atoms[i]
    }

    pub fn atoms(&self) -> &[Vec<f64>] {
        &self.atoms
    }

    pub fn weight(&self, i: usize) -> f64 {
        self.weights[i]
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Pushforward under `x ↦ (x₁, …, x_k)`.
    pub fn project(&self, k: usize) -> Result<DiscreteMeasure> {
        if k == 0 || k > self.dim {
            return Err(Error::InvalidParameter(format!(
                "projection dimension {k} outside 1..={}",
                self.dim
            )));
        }
        DiscreteMeasure::new(
            k,
            self.atoms.iter().map(|a| a[..k].to_vec()).collect(),
            self.weights.clone(),
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chaos::gauss_hermite_grid;
    use crate::malliavin::ou_semigroup;
    use approx::assert_abs_diff_eq;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn shifted_1d(m: f64) -> GaussianMixture {
        GaussianMixture::gaussian(vec![m], vec![vec![1.0]]).unwrap()
    }

    #[test]
    fn standard_density_is_one() {
        let mu = GaussianMixture::standard(2);
        for x in [[0.0, 0.0], [1.3, -0.4], [3.0, 5.0]] {
            assert_abs_diff_eq!(mu.density_vs_mu(&x).unwrap(), 1.0, epsilon = 1e-13);
        }
    }

    #[test]
    fn shifted_density_matches_likelihood_ratio() {
        // dN(m,1)/dN(0,1)(x) = exp(xm − m²/2); at m = 0.5, x = 0 this is
        // exp(−0.125).
        let nu = shifted_1d(0.5);
        assert_abs_diff_eq!(
            nu.density_vs_mu(&[0.0]).unwrap(),
            0.882_496_902_584_595_5,
            epsilon = 1e-14
        );
        for x in [-1.0, 0.3, 2.0] {
            assert_abs_diff_eq!(
                nu.density_vs_mu(&[x]).unwrap(),
                (0.5 * x - 0.125).exp(),
                epsilon = 1e-13
            );
        }
    }

    #[test]
    fn density_integrates_to_one() {
        let grid = gauss_hermite_grid(1, 30).unwrap();
        let nu = GaussianMixture::new(
            1,
            vec![
                (0.6, vec![0.4], vec![vec![0.8]]),
                (0.4, vec![-0.3], vec![vec![1.5]]),
            ],
        )
        .unwrap();
        let mass = grid.integrate(|x| nu.density_vs_mu(x).unwrap());
        assert_abs_diff_eq!(mass, 1.0, epsilon = 1e-8);
    }

    #[test]
    fn singular_component_rejected_until_smoothed() {
        let point = GaussianMixture::point_mass(vec![0.7, -0.2]).unwrap();
        assert!(matches!(
            point.density_vs_mu(&[0.0, 0.0]),
            Err(Error::SingularCovariance)
        ));
        let smoothed = point.ou_smooth(0.5).unwrap();
        assert!(smoothed.density_vs_mu(&[0.0, 0.0]).is_ok());
    }

    #[test]
    fn smoothed_point_mass_matches_closed_form_kernel() {
        // T_t δ_z = N(e^{−t}z, (1−e^{−2t})·Id); compare the density ratio
        // against (1−e^{−2t})^{−n/2}·exp(−(|x|²−2eᵗ(z,x)+|z|²)/(2(e^{2t}−1))).
        let z = [0.7, -0.4];
        let t = 0.3;
        let point = GaussianMixture::point_mass(z.to_vec()).unwrap();
        let smoothed = point.ou_smooth(t).unwrap();
        let e2t = (2.0 * t).exp();
        for x in [[0.0, 0.0], [0.5, 0.5], [-1.2, 0.8]] {
            let x_sq: f64 = x.iter().map(|v| v * v).sum();
            let z_sq: f64 = z.iter().map(|v| v * v).sum();
            let zx: f64 = x.iter().zip(&z).map(|(a, b)| a * b).sum();
            let kernel = (1.0 - (-2.0 * t).exp()).powf(-1.0)
                * (-(x_sq - 2.0 * t.exp() * zx + z_sq) / (2.0 * (e2t - 1.0))).exp();
            assert_abs_diff_eq!(smoothed.density_vs_mu(&x).unwrap(), kernel, epsilon = 1e-12);
        }
    }

    #[test]
    fn smoothing_at_zero_is_identity_and_limit_is_standard() {
        let nu = GaussianMixture::new(
            2,
            vec![(1.0, vec![1.0, 2.0], vec![vec![1.0, 0.0], vec![0.0, 4.0]])],
        )
        .unwrap();
        let same = nu.ou_smooth(0.0).unwrap();
        assert_abs_diff_eq!(same.components()[0].mean[1], 2.0);
        assert_abs_diff_eq!(same.components()[0].cov[(1, 1)], 4.0);

        let far = nu.ou_smooth(40.0).unwrap();
        assert_abs_diff_eq!(far.components()[0].mean[0], 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(far.components()[0].cov[(0, 0)], 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(far.components()[0].cov[(1, 1)], 1.0, epsilon = 1e-12);
    }

    #[test]
    fn epsilon_mix_floor_and_fixed_point() {
        let nu = shifted_1d(1.5);
        let eps = 0.05;
        let mixed = nu.epsilon_mix(eps).unwrap();
        let floor = eps / (1.0 + eps);
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let cloud = GaussianMixture::standard(1).sample(10_000, &mut rng).unwrap();
        for atom in cloud.atoms() {
            let d = mixed.density_vs_mu(atom).unwrap();
            assert!(d >= floor - 1e-12, "density {d} below the ε floor {floor}");
        }

        let mu = GaussianMixture::standard(1);
        let remixed = mu.epsilon_mix(0.3).unwrap();
        for x in [-2.0, 0.0, 1.0] {
            assert_abs_diff_eq!(remixed.density_vs_mu(&[x]).unwrap(), 1.0, epsilon = 1e-12);
        }

        // ε → 0: the original component weights are recovered.
        let tiny = nu.epsilon_mix(1e-9).unwrap();
        assert_abs_diff_eq!(tiny.components()[0].weight, 1.0, epsilon = 1e-8);
    }

    #[test]
    fn projection_takes_marginals() {
        let nu = GaussianMixture::new(
            2,
            vec![(1.0, vec![1.0, 2.0], vec![vec![1.0, 0.0], vec![0.0, 4.0]])],
        )
        .unwrap();
        let marg = nu.project(1).unwrap();
        assert_eq!(marg.dim(), 1);
        assert_abs_diff_eq!(marg.components()[0].mean[0], 1.0);
        assert_abs_diff_eq!(marg.components()[0].cov[(0, 0)], 1.0);
        let total: f64 = marg.components().iter().map(|c| c.weight).sum();
        assert_abs_diff_eq!(total, 1.0);

        let full = nu.project(2).unwrap();
        assert_abs_diff_eq!(full.components()[0].cov[(1, 1)], 4.0);
    }

    #[test]
    fn conditional_expectation_drops_mixed_terms() {
        let f = ChaosFn::from_coeffs(
            2,
            3,
            [
                (MultiIndex::new(vec![0, 0]), 1.0),
                (MultiIndex::new(vec![1, 1]), 2.0),
                (MultiIndex::new(vec![2, 0]), 0.5),
                (MultiIndex::new(vec![0, 3]), -0.7),
            ],
        )
        .unwrap();
        let ce = conditional_expectation(&f, 1).unwrap();
        assert_abs_diff_eq!(ce.coeff(&MultiIndex::new(vec![1, 1])), 0.0);
        assert_abs_diff_eq!(ce.coeff(&MultiIndex::new(vec![2, 0])), 0.5);
        assert!(ce.parseval_norm_sq() <= f.parseval_norm_sq());

        // k = n is the identity; tower property for k' ≤ k.
        let full = conditional_expectation(&f, 2).unwrap();
        assert!(full.max_coeff_distance(&f) == 0.0);
        let tower = conditional_expectation(&conditional_expectation(&f, 2).unwrap(), 1).unwrap();
        assert!(tower.max_coeff_distance(&ce) == 0.0);
    }

    #[test]
    fn restrict_and_lift_roundtrip() {
        let f = ChaosFn::from_coeffs(
            3,
            2,
            [
                (MultiIndex::new(vec![2, 0, 0]), 1.5),
                (MultiIndex::new(vec![0, 1, 0]), -0.25),
            ],
        )
        .unwrap();
        let r = restrict_chaos(&f, 2).unwrap();
        assert_eq!(r.dim(), 2);
        let back = lift_chaos(&r, 3).unwrap();
        assert!(back.max_coeff_distance(&f) == 0.0);
        assert!(restrict_chaos(&f, 1).is_err());
    }

    #[test]
    fn sampling_is_seeded_and_uniformly_weighted() {
        let nu = shifted_1d(0.5);
        let mut rng_a = ChaCha8Rng::seed_from_u64(99);
        let mut rng_b = ChaCha8Rng::seed_from_u64(99);
        let a = nu.sample(1000, &mut rng_a).unwrap();
        let b = nu.sample(1000, &mut rng_b).unwrap();
        assert_eq!(a, b);
        assert!(a.weights().iter().all(|&w| (w - 1e-3).abs() < 1e-15));

        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let big = nu.sample(100_000, &mut rng).unwrap();
        let mean: f64 =
            big.atoms().iter().map(|a| a[0]).sum::<f64>() / big.len() as f64;
        // CLT bound 3σ/√N ≈ 0.0095, padded to 0.02.
        assert!((mean - 0.5).abs() < 0.02, "empirical mean {mean}");
    }

    #[test]
    fn smoothing_commutes_with_density_transport() {
        // Chaos projection of the smoothed measure's density equals the
        // semigroup applied to the projection of the original density.
        let grid = gauss_hermite_grid(1, 30).unwrap();
        let nu = GaussianMixture::new(
            1,
            vec![
                (0.7, vec![0.3], vec![vec![1.0]]),
                (0.3, vec![-0.2], vec![vec![0.7]]),
            ],
        )
        .unwrap();
        let t = 0.25;
        let d = 8;
        let alpha = project(|x| nu.density_vs_mu(x).unwrap(), 1, d, &grid).unwrap();
        let smoothed = nu.ou_smooth(t).unwrap();
        let alpha_smoothed =
            project(|x| smoothed.density_vs_mu(x).unwrap(), 1, d, &grid).unwrap();
        let spectral = ou_semigroup(&alpha, t).unwrap();
        assert!(alpha_smoothed.max_coeff_distance(&spectral) < 1e-6);
    }

    #[test]
    fn smoothing_contracts_l1_difference() {
        let grid = gauss_hermite_grid(1, 30).unwrap();
        let nu0 = GaussianMixture::standard(1);
        let nu1 = shifted_1d(0.6);
        let l1 = |a: &GaussianMixture, b: &GaussianMixture| {
            grid.integrate(|x| (a.density_vs_mu(x).unwrap() - b.density_vs_mu(x).unwrap()).abs())
        };
        let before = l1(&nu1, &nu0);
        for t in [0.1, 0.5, 2.0] {
            let after = l1(&nu1.ou_smooth(t).unwrap(), &nu0.ou_smooth(t).unwrap());
            assert!(after <= before + 1e-9, "t={t}: {after} > {before}");
        }
    }

    #[test]
    fn difference_density_is_centered() {
        let grid = gauss_hermite_grid(1, 30).unwrap();
        let nu0 = GaussianMixture::standard(1);
        let nu1 = shifted_1d(0.4).epsilon_mix(0.05).unwrap();
        let (alpha, adjust) = difference_density_chaos(&nu1, &nu0, 8, &grid).unwrap();
        assert_abs_diff_eq!(alpha.mean(), 0.0);
        assert!(adjust < 1e-9, "mean adjustment {adjust}");
        assert!(alpha.parseval_norm() > 0.1);
    }

    #[test]
    fn spec_roundtrip() {
        let nu = GaussianMixture::new(
            2,
            vec![
                (0.25, vec![0.0, 1.0], vec![vec![1.0, 0.1], vec![0.1, 2.0]]),
                (0.75, vec![-1.0, 0.0], vec![vec![0.5, 0.0], vec![0.0, 0.5]]),
            ],
        )
        .unwrap();
        let spec = nu.to_spec();
        let text = serde_json::to_string(&spec).unwrap();
        let parsed: MeasureSpec = serde_json::from_str(&text).unwrap();
        let back = GaussianMixture::from_spec(&parsed).unwrap();
        assert_eq!(back.dim(), 2);
        assert_abs_diff_eq!(back.components()[0].cov[(0, 1)], 0.1);
    }

    #[test]
    fn invalid_specs_rejected() {
        // Weights off by more than 1e−12.
        assert!(GaussianMixture::new(1, vec![(0.5, vec![0.0], vec![vec![1.0]])]).is_err());
        // Asymmetric covariance.
        assert!(GaussianMixture::new(
            2,
            vec![(1.0, vec![0.0, 0.0], vec![vec![1.0, 0.5], vec![-0.5, 1.0]])]
        )
        .is_err());
        // Negative eigenvalue.
        assert!(GaussianMixture::new(
            2,
            vec![(1.0, vec![0.0, 0.0], vec![vec![1.0, 2.0], vec![2.0, 1.0]])]
        )
        .is_err());
    }
}
