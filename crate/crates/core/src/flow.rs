//! The discretized transport flow: maps `φ_k(x) = x + u(x)/(m·α_{k/m}(x))`
//! pushing the interpolated measure `ν_{k/m}` approximately onto
//! `ν_{(k+1)/m}`, with per-step first-order (Taylor) and movement errors
//! checked against their closed-form bounds.
//!
//! All expectations are quadrature sums with the density weight
//! `α_t·(grid weights)`, so the per-step bounds are pointwise inequalities
//! summed with positive weights — they hold to quadrature precision by
//! construction. Test functions are smoothed chaos polynomials whose
//! gradient is certified ≤ 1 on a lattice covering the working region.

use serde::Serialize;

use crate::chaos::{ChaosFn, QuadratureGrid, VectorField};
use crate::malliavin::{derivative, divergence, min_norm_field, ou_semigroup};
use crate::measures::{difference_density_chaos, GaussianMixture};
use crate::{Error, Result};

/// One flow experiment: step count, working density floor, a divergence
/// preimage `u` of `α₁ − α₀`, the endpoint densities, the 1-Lipschitz test
/// family, and the quadrature everything is evaluated on.
#[derive(Debug, Clone)]
pub struct FlowConfig {
    pub m: usize,
    /// Working floor: minimum of the interpolated densities over the grid.
    pub epsilon: f64,
    /// Mixing parameter used when the endpoint measures were ε-mixed.
    pub mix_epsilon: f64,
    pub u: VectorField,
    pub alpha0: ChaosFn,
    pub alpha1: ChaosFn,
    pub test_fns: Vec<ChaosFn>,
    pub grid: QuadratureGrid,
    /// Supremum of the Hessian operator norm of each test function over
    /// the certification lattice.
    pub hessian_sup: Vec<f64>,
    /// `Σ_j w_j |u(x_j)|`.
    pub e_abs_u: f64,
    /// `E|u|²` (Parseval, exact).
    pub e_sq_u: f64,
}

impl FlowConfig {
    /// Build a flow experiment from two mixtures: ε-mix both, project the
    /// densities at degree `d`, take `u` as the minimal-norm preimage of
    /// the difference, and draw `n_test` smoothed 1-Lipschitz test
    /// functions.
    #[allow(clippy::too_many_arguments)]
    pub fn from_measures(
        nu0: &GaussianMixture,
        nu1: &GaussianMixture,
        d: u32,
        grid: &QuadratureGrid,
        m: usize,
        mix_epsilon: f64,
        t_smooth: f64,
        n_test: usize,
        seed: u64,
    ) -> Result<FlowConfig> {
        if m == 0 {
            return Err(Error::InvalidParameter("step count must be ≥ 1".into()));
        }
        let nu0m = nu0.epsilon_mix(mix_epsilon)?;
        let nu1m = nu1.epsilon_mix(mix_epsilon)?;
        let alpha0 = crate::chaos::project(
            |x| nu0m.density_vs_mu(x).unwrap_or(f64::NAN),
            nu0.dim(),
            d,
            grid,
        )?;
        let (diff, _) = difference_density_chaos(&nu1m, &nu0m, d, grid)?;
        // α₁ := α₀ + diff keeps the divergence identity exact.
        let alpha1 = alpha0.add(&diff)?;
        let u = min_norm_field(&diff);

        let lattice = certification_lattice(grid, &u, m, &alpha0, &alpha1)?;
        use rand::SeedableRng;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let mut test_fns = Vec::with_capacity(n_test);
        let mut hessian_sup = Vec::with_capacity(n_test);
        for _ in 0..n_test {
            let f = smooth_lipschitz_fn(nu0.dim(), 5, t_smooth, &lattice, &mut rng)?;
            hessian_sup.push(hessian_sup_on(&f, &lattice)?);
            test_fns.push(f);
        }

        FlowConfig::new(m, mix_epsilon, u, alpha0, alpha1, test_fns, hessian_sup, grid.clone())
    }

    /// Validate the invariants: `I u = α₁ − α₀` within 1e-8 and the
    /// interpolated densities stay positive on the grid.
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        m: usize,
        mix_epsilon: f64,
        u: VectorField,
        alpha0: ChaosFn,
        alpha1: ChaosFn,
        test_fns: Vec<ChaosFn>,
        hessian_sup: Vec<f64>,
        grid: QuadratureGrid,
    ) -> Result<FlowConfig> {
        let diff = alpha1.sub(&alpha0)?;
        let defect = divergence(&u).max_coeff_distance(&diff.centered());
        if defect > 1e-8 {
            return Err(Error::InvalidParameter(format!(
                "u is not a divergence preimage of α₁ − α₀ (defect {defect:e})"
            )));
        }
        // The interpolation is affine in t, so the nodewise minimum over
        // t ∈ [0,1] is attained at an endpoint.
        let mut floor = f64::INFINITY;
        for node in grid.nodes() {
            floor = floor.min(alpha0.eval(node)?);
            floor = floor.min(alpha1.eval(node)?);
        }
        let target = mix_epsilon / (1.0 + mix_epsilon);
        if floor < 0.5 * target {
            return Err(Error::DensityFloor {
                value: floor,
                floor: target,
            });
        }
        let e_abs_u = {
            let mut acc = 0.0;
            for (x, &w) in grid.nodes().iter().zip(grid.weights()) {
                acc += w * u.norm_at(x)?;
            }
            acc
        };
        let e_sq_u = u.parseval_norm_sq();
        Ok(FlowConfig {
            m,
            epsilon: floor.min(target),
            mix_epsilon,
            u,
            alpha0,
            alpha1,
            test_fns,
            grid,
            hessian_sup,
            e_abs_u,
            e_sq_u,
        })
    }

    /// `α_t = α₀ + t(α₁ − α₀)`.
    pub fn interp_density(&self, t: f64) -> Result<ChaosFn> {
        if !(0.0..=1.0).contains(&t) {
            return Err(Error::InvalidParameter(format!(
                "interpolation time {t} outside [0,1]"
            )));
        }
        let diff = self.alpha1.sub(&self.alpha0)?;
        self.alpha0.add_scaled(&diff, t)
    }

    /// `φ_k(x) = x + u(x)/(m·α_{k/m}(x))`; errors if the density at `x`
    /// has fallen below half the working floor (a truncation artifact).
    pub fn flow_step(&self, k: usize, x: &[f64]) -> Result<Vec<f64>> {
        if k >= self.m {
            return Err(Error::InvalidParameter(format!(
                "step index {k} outside 0..{}",
                self.m
            )));
        }
        let t = k as f64 / self.m as f64;
        let density = self.interp_density(t)?.eval(x)?;
        if density < 0.5 * self.epsilon {
            return Err(Error::DensityFloor {
                value: density,
                floor: self.epsilon,
            });
        }
        let uv = self.u.eval(x)?;
        Ok(x.iter()
            .zip(&uv)
            .map(|(xi, ui)| xi + ui / (self.m as f64 * density))
            .collect())
    }
}

/// Per-step measured errors and their closed-form bounds.
#[derive(Debug, Clone, Serialize)]
pub struct StepErrors {
    pub k: usize,
    pub taylor_err: f64,
    pub taylor_bound: f64,
    pub move_cost: f64,
    pub move_bound: f64,
}

/// Expectation `Σ_j w_j g(x_j) α_t(x_j)` for tabulated density values.
fn integrate_against(
    grid: &QuadratureGrid,
    density_vals: &[f64],
    mut g: impl FnMut(&[f64]) -> Result<f64>,
) -> Result<f64> {
    let mut acc = 0.0;
    for ((x, &w), &a) in grid.nodes().iter().zip(grid.weights()).zip(density_vals) {
        acc += w * a * g(x)?;
    }
    Ok(acc)
}

/// Measured Taylor and movement errors for step `k` and test function
/// index `f_idx`, with their bounds.
pub fn step_error_pair(cfg: &FlowConfig, k: usize, f_idx: usize) -> Result<StepErrors> {
    let f = cfg
        .test_fns
        .get(f_idx)
        .ok_or_else(|| Error::InvalidParameter(format!("no test function {f_idx}")))?;
    let c_hess = cfg.hessian_sup[f_idx];
    let m = cfg.m as f64;
    let t0 = k as f64 / m;
    let t1 = (k + 1) as f64 / m;
    let dens0: Vec<f64> = {
        let a = cfg.interp_density(t0)?;
        cfg.grid
            .nodes()
            .iter()
            .map(|x| a.eval(x))
            .collect::<Result<_>>()?
    };
    let dens1: Vec<f64> = {
        let a = cfg.interp_density(t1)?;
        cfg.grid
            .nodes()
            .iter()
            .map(|x| a.eval(x))
            .collect::<Result<_>>()?
    };

    let int_f_next = integrate_against(&cfg.grid, &dens1, |x| f.eval(x))?;
    let int_f_cur = integrate_against(&cfg.grid, &dens0, |x| f.eval(x))?;
    let int_f_pushed = integrate_against(&cfg.grid, &dens0, |x| {
        let y = cfg.flow_step(k, x)?;
        f.eval(&y)
    })?;

    Ok(StepErrors {
        k,
        taylor_err: (int_f_pushed - int_f_next).abs(),
        taylor_bound: c_hess * cfg.e_sq_u / (m * m * cfg.epsilon),
        move_cost: (int_f_pushed - int_f_cur).abs(),
        move_bound: cfg.e_abs_u / m,
    })
}

/// Full telescoped run for one test function.
#[derive(Debug, Clone, Serialize)]
pub struct FlowReport {
    pub m: usize,
    pub epsilon: f64,
    #[serde(rename = "E_abs_u")]
    pub e_abs_u: f64,
    #[serde(rename = "E_sq_u")]
    pub e_sq_u: f64,
    #[serde(rename = "C")]
    pub hessian_sup: f64,
    pub per_step: Vec<StepErrors>,
    pub total_gap: f64,
    pub combined_bound: f64,
}

/// Telescope the steps `k = 0..m−1` and check the combined bound
/// `|∫f dν₀ − ∫f dν₁| ≤ Ê|u| + (C/(m·ε))·Ê|u|²` (plus a 1e-7 numerical
/// tolerance).
pub fn run_flow(cfg: &FlowConfig, f_idx: usize) -> Result<FlowReport> {
    let mut per_step = Vec::with_capacity(cfg.m);
    for k in 0..cfg.m {
        let errs = step_error_pair(cfg, k, f_idx)?;
        if errs.move_cost > errs.move_bound + 1e-8 {
            return Err(Error::Solver(format!(
                "step {k}: movement cost {} exceeds bound {}",
                errs.move_cost, errs.move_bound
            )));
        }
        if errs.taylor_err > errs.taylor_bound + 1e-7 {
            return Err(Error::Solver(format!(
                "step {k}: Taylor error {} exceeds bound {}",
                errs.taylor_err, errs.taylor_bound
            )));
        }
        per_step.push(errs);
    }

    let f = &cfg.test_fns[f_idx];
    let dens0: Vec<f64> = cfg
        .grid
        .nodes()
        .iter()
        .map(|x| cfg.alpha0.eval(x))
        .collect::<Result<_>>()?;
    let dens1: Vec<f64> = cfg
        .grid
        .nodes()
        .iter()
        .map(|x| cfg.alpha1.eval(x))
        .collect::<Result<_>>()?;
    let total_gap = (integrate_against(&cfg.grid, &dens0, |x| f.eval(x))?
        - integrate_against(&cfg.grid, &dens1, |x| f.eval(x))?)
    .abs();
    let c_hess = cfg.hessian_sup[f_idx];
    let combined_bound =
        cfg.e_abs_u + c_hess * cfg.e_sq_u / (cfg.m as f64 * cfg.epsilon);
    if total_gap > combined_bound + 1e-7 {
        return Err(Error::Solver(format!(
            "total gap {total_gap} exceeds the combined bound {combined_bound}"
        )));
    }
    Ok(FlowReport {
        m: cfg.m,
        epsilon: cfg.epsilon,
        e_abs_u: cfg.e_abs_u,
        e_sq_u: cfg.e_sq_u,
        hessian_sup: c_hess,
        per_step,
        total_gap,
        combined_bound,
    })
}

/// Tensor lattice covering the quadrature hull plus the largest actual
/// flow displacement, used to certify gradient and Hessian bounds.
fn certification_lattice(
    grid: &QuadratureGrid,
    u: &VectorField,
    m: usize,
    alpha0: &ChaosFn,
    alpha1: &ChaosFn,
) -> Result<Vec<Vec<f64>>> {
    let dim = grid.dim();
    let radius = grid
        .nodes()
        .iter()
        .flat_map(|x| x.iter())
        .fold(0.0_f64, |r, &v| r.max(v.abs()));
    // Largest nodewise displacement |u(x)|/(m·α(x)); the interpolated
    // density is affine in t, so its nodewise minimum is at an endpoint.
    let mut pad = 0.0_f64;
    for x in grid.nodes() {
        let a = alpha0.eval(x)?.min(alpha1.eval(x)?).max(1e-6);
        pad = pad.max(u.norm_at(x)? / (m as f64 * a));
    }
    let extent = radius + 1.1 * pad + 0.05;
    let per_axis: usize = match dim {
        1 => 241,
        2 => 61,
        _ => 21,
    };
    let mut lattice = Vec::with_capacity(per_axis.pow(dim as u32));
    let mut point = vec![0.0; dim];
    fill_lattice(&mut lattice, &mut point, 0, extent, per_axis);
    Ok(lattice)
}

fn fill_lattice(
    out: &mut Vec<Vec<f64>>,
    point: &mut Vec<f64>,
    axis: usize,
    extent: f64,
    per_axis: usize,
) {
    if axis == point.len() {
        out.push(point.clone());
        return;
    }
    for i in 0..per_axis {
        point[axis] = -extent + 2.0 * extent * i as f64 / (per_axis - 1) as f64;
        fill_lattice(out, point, axis + 1, extent, per_axis);
    }
}

/// One random degree-≤5 chaos polynomial, rescaled so its gradient norm is
/// 1 on the lattice, then smoothed by `T_{t}` and renormalized so the
/// smoothed gradient is certified ≤ 1 on the lattice as well.
fn smooth_lipschitz_fn<R: rand::Rng>(
    dim: usize,
    degree: u32,
    t_smooth: f64,
    lattice: &[Vec<f64>],
    rng: &mut R,
) -> Result<ChaosFn> {
    let g = crate::chaos::random_chaos_fn(dim, degree, 1.0, rng);
    let grad = derivative(&g);
    let mut max_grad = 0.0_f64;
    for x in lattice {
        max_grad = max_grad.max(grad.norm_at(x)?);
    }
    if max_grad == 0.0 {
        return Ok(ChaosFn::zero(dim, degree));
    }
    let f = ou_semigroup(&g.scaled(1.0 / max_grad), t_smooth)?;
    let fgrad = derivative(&f);
    let mut max_fgrad = 0.0_f64;
    for x in lattice {
        max_fgrad = max_fgrad.max(fgrad.norm_at(x)?);
    }
    if max_fgrad > 1.0 {
        Ok(f.scaled(1.0 / max_fgrad))
    } else {
        Ok(f)
    }
}

/// Supremum of the Hessian operator norm over the lattice, from exact
/// polynomial second derivatives.
fn hessian_sup_on(f: &ChaosFn, lattice: &[Vec<f64>]) -> Result<f64> {
    let dim = f.dim();
    let grad = derivative(f);
    let hess: Vec<Vec<ChaosFn>> = (0..dim)
        .map(|i| {
            let gi = derivative(grad.component(i));
            (0..dim).map(|j| gi.component(j).clone()).collect()
        })
        .collect();
    let mut sup = 0.0_f64;
    let mut entries = vec![0.0; dim * dim];
    for x in lattice {
        for i in 0..dim {
            for j in 0..dim {
                entries[i * dim + j] = hess[i][j].eval(x)?;
            }
        }
        let norm = match dim {
            1 => entries[0].abs(),
            2 => {
                // Symmetric 2×2 spectral norm in closed form.
                let (a, b, c) = (entries[0], 0.5 * (entries[1] + entries[2]), entries[3]);
                let mean = 0.5 * (a + c);
                let rad = (0.25 * (a - c) * (a - c) + b * b).sqrt();
                (mean + rad).abs().max((mean - rad).abs())
            }
            _ => {
                let m = nalgebra::DMatrix::from_row_slice(dim, dim, &entries);
                let sym = 0.5 * (&m + m.transpose());
                nalgebra::SymmetricEigen::try_new(sym, f64::EPSILON, 10_000)
                    .ok_or(Error::EigenFailure)?
                    .eigenvalues
                    .iter()
                    .fold(0.0_f64, |acc, &l| acc.max(l.abs()))
            }
        };
        sup = sup.max(norm);
    }
    Ok(sup)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chaos::gauss_hermite_grid;
    use approx::assert_abs_diff_eq;

    fn small_config(m: usize) -> FlowConfig {
        let grid = gauss_hermite_grid(1, 20).unwrap();
        let nu0 = GaussianMixture::standard(1);
        let nu1 = GaussianMixture::gaussian(vec![0.25], vec![vec![1.0]]).unwrap();
        FlowConfig::from_measures(&nu0, &nu1, 8, &grid, m, 0.05, 0.05, 3, 11).unwrap()
    }

    #[test]
    fn interp_density_endpoints_and_linearity() {
        let cfg = small_config(8);
        let a0 = cfg.interp_density(0.0).unwrap();
        let a1 = cfg.interp_density(1.0).unwrap();
        assert!(a0.max_coeff_distance(&cfg.alpha0) < 1e-14);
        assert!(a1.max_coeff_distance(&cfg.alpha1) < 1e-14);

        let mid = cfg.interp_density(0.5).unwrap();
        let manual = cfg.alpha0.add(&cfg.alpha1).unwrap().scaled(0.5);
        assert!(mid.max_coeff_distance(&manual) < 1e-14);

        // Update law: α_t − α_s = (t−s)·Iu exactly in coefficients.
        let s = 0.25;
        let t = 0.75;
        let lhs = cfg
            .interp_density(t)
            .unwrap()
            .sub(&cfg.interp_density(s).unwrap())
            .unwrap();
        let rhs = divergence(&cfg.u).scaled(t - s);
        assert!(lhs.max_coeff_distance(&rhs) < 1e-10);
    }

    #[test]
    fn flow_step_zero_field_is_identity() {
        let grid = gauss_hermite_grid(1, 12).unwrap();
        let alpha0 = ChaosFn::constant(1, 1.0);
        let cfg = FlowConfig::new(
            4,
            0.05,
            VectorField::zero(1, 1),
            alpha0.clone(),
            alpha0,
            vec![],
            vec![],
            grid,
        )
        .unwrap();
        let y = cfg.flow_step(0, &[0.7]).unwrap();
        assert_abs_diff_eq!(y[0], 0.7);
    }

    #[test]
    fn flow_step_displacement_shrinks_with_m() {
        let cfg8 = small_config(8);
        let cfg64 = small_config(64);
        let x = [0.4];
        let d8 = (cfg8.flow_step(3, &x).unwrap()[0] - x[0]).abs();
        let d64 = (cfg64.flow_step(3, &x).unwrap()[0] - x[0]).abs();
        assert!(d64 < d8 / 4.0);
        // Displacement sign follows the sign of u.
        let u_val = cfg8.u.eval(&x).unwrap()[0];
        let step = cfg8.flow_step(0, &x).unwrap()[0] - x[0];
        assert_eq!(u_val.signum(), step.signum());
    }

    #[test]
    fn step_bounds_hold_for_every_step() {
        let cfg = small_config(8);
        for f_idx in 0..cfg.test_fns.len() {
            for k in 0..cfg.m {
                let e = step_error_pair(&cfg, k, f_idx).unwrap();
                assert!(
                    e.move_cost <= e.move_bound + 1e-8,
                    "k={k}: move {} > {}",
                    e.move_cost,
                    e.move_bound
                );
                assert!(
                    e.taylor_err <= e.taylor_bound + 1e-7,
                    "k={k}: taylor {} > {}",
                    e.taylor_err,
                    e.taylor_bound
                );
            }
        }
    }

    #[test]
    fn run_flow_combined_bound() {
        let cfg = small_config(16);
        for f_idx in 0..cfg.test_fns.len() {
            let report = run_flow(&cfg, f_idx).unwrap();
            assert!(report.total_gap <= report.combined_bound + 1e-7);
            assert_eq!(report.per_step.len(), 16);
        }
    }

    #[test]
    fn identical_measures_zero_gap() {
        let grid = gauss_hermite_grid(1, 16).unwrap();
        let nu = GaussianMixture::standard(1);
        let cfg =
            FlowConfig::from_measures(&nu, &nu, 6, &grid, 8, 0.05, 0.05, 2, 3).unwrap();
        assert!(cfg.e_sq_u < 1e-16);
        let report = run_flow(&cfg, 0).unwrap();
        assert!(report.total_gap < 1e-10);
        for e in &report.per_step {
            assert!(e.taylor_err < 1e-10);
            assert!(e.move_cost < 1e-10);
        }
    }

    #[test]
    fn taylor_term_scales_quadratically() {
        // Halving test: the summed Taylor error at 2m is about half the
        // one at m (per-step 1/m² times m steps).
        let totals: Vec<f64> = [8usize, 16, 32]
            .iter()
            .map(|&m| {
                let cfg = small_config(m);
                (0..cfg.m)
                    .map(|k| step_error_pair(&cfg, k, 0).unwrap().taylor_err)
                    .sum()
            })
            .collect();
        for w in totals.windows(2) {
            let ratio = w[0] / w[1];
            assert!(
                (1.6..=2.4).contains(&ratio),
                "doubling m gave ratio {ratio}, totals {totals:?}"
            );
        }
    }

    #[test]
    fn test_family_is_lipschitz_at_nodes() {
        let cfg = small_config(8);
        for f in &cfg.test_fns {
            let grad = derivative(f);
            for x in cfg.grid.nodes() {
                let g = grad.norm_at(x).unwrap();
                assert!(g <= 1.0 + 1e-12, "gradient {g} above 1 at a node");
            }
        }
    }

    #[test]
    fn envelope_over_family_stays_below_e_abs_u() {
        // As m grows the combined bound collapses onto Ê|u|: the supremum
        // of |∫f d(ν₁−ν₀)| over the 1-Lipschitz family must sit below
        // Ê|u|·(1 + 10/m).
        for m in [8usize, 16, 32, 64] {
            let cfg = small_config(m);
            let mut envelope = 0.0_f64;
            for f_idx in 0..cfg.test_fns.len() {
                envelope = envelope.max(run_flow(&cfg, f_idx).unwrap().total_gap);
            }
            let cap = cfg.e_abs_u * (1.0 + 10.0 / m as f64);
            assert!(
                envelope <= cap + 1e-9,
                "m={m}: envelope {envelope} above Ê|u|·(1+10/m) = {cap}"
            );
        }
    }
}
