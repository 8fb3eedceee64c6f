//! Python bindings for the krdiv core: chaos expansions, the operator
//! toolkit, Gaussian mixtures, transport oracles, and the sandwich report.
//!
//! Build with `cargo build -p krdiv-python --release`; the resulting
//! `libkrdiv_py.so` imports as the module `krdiv_py` (see
//! `python/smoke_test.py`).

use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;

use krdiv::chaos::{gauss_hermite_grid, ChaosFn, MultiIndex, VectorField};
use krdiv::measures::difference_density_chaos;
use krdiv::minimize::{EvalSet, GapConfig, MinimizeOptions};
use krdiv::{DiscreteMeasure, Error, GaussianMixture};

fn to_py_err(e: Error) -> PyErr {
    match e {
        Error::InvalidParameter(_)
        | Error::InvalidMeasure(_)
        | Error::DimensionMismatch { .. }
        | Error::NonFinite { .. }
        | Error::Unbalanced(_) => PyValueError::new_err(e.to_string()),
        other => PyRuntimeError::new_err(other.to_string()),
    }
}

/// Sparse Hermite-chaos expansion on (ℝⁿ, standard Gaussian).
#[pyclass(name = "ChaosFn", skip_from_py_object)]
#[derive(Clone)]
struct PyChaosFn {
    inner: ChaosFn,
}

#[pymethods]
impl PyChaosFn {
    /// ChaosFn(dim, max_degree, coeffs) with coeffs a dict mapping
    /// multi-index tuples to floats.
    #[new]
    fn new(dim: usize, max_degree: u32, coeffs: Vec<(Vec<u32>, f64)>) -> PyResult<Self> {
        let entries = coeffs
            .into_iter()
            .map(|(idx, c)| (MultiIndex::new(idx), c));
        Ok(PyChaosFn {
            inner: ChaosFn::from_coeffs(dim, max_degree, entries).map_err(to_py_err)?,
        })
    }

    #[staticmethod]
    fn constant(dim: usize, value: f64) -> Self {
        PyChaosFn {
            inner: ChaosFn::constant(dim, value),
        }
    }

    fn eval(&self, x: Vec<f64>) -> PyResult<f64> {
        self.inner.eval(&x).map_err(to_py_err)
    }

    fn coeffs(&self) -> Vec<(Vec<u32>, f64)> {
        self.inner
            .coeffs()
            .map(|(idx, &c)| (idx.entries().to_vec(), c))
            .collect()
    }

    fn mean(&self) -> f64 {
        self.inner.mean()
    }

    fn parseval_norm(&self) -> f64 {
        self.inner.parseval_norm()
    }

    fn centered(&self) -> Self {
        PyChaosFn {
            inner: self.inner.centered(),
        }
    }

    fn dim(&self) -> usize {
        self.inner.dim()
    }

    fn max_degree(&self) -> u32 {
        self.inner.max_degree()
    }

    fn __repr__(&self) -> String {
        format!(
            "ChaosFn(dim={}, max_degree={}, terms={})",
            self.inner.dim(),
            self.inner.max_degree(),
            self.inner.num_terms()
        )
    }
}

/// ℝⁿ-valued field with one chaos expansion per coordinate.
#[pyclass(name = "VectorField", skip_from_py_object)]
#[derive(Clone)]
struct PyVectorField {
    inner: VectorField,
}

#[pymethods]
impl PyVectorField {
    fn components(&self) -> Vec<PyChaosFn> {
        self.inner
            .components()
            .iter()
            .map(|c| PyChaosFn { inner: c.clone() })
            .collect()
    }

    fn eval(&self, x: Vec<f64>) -> PyResult<Vec<f64>> {
        self.inner.eval(&x).map_err(to_py_err)
    }

    fn norm_at(&self, x: Vec<f64>) -> PyResult<f64> {
        self.inner.norm_at(&x).map_err(to_py_err)
    }

    fn parseval_norm_sq(&self) -> f64 {
        self.inner.parseval_norm_sq()
    }

    fn dim(&self) -> usize {
        self.inner.dim()
    }

    fn __repr__(&self) -> String {
        format!("VectorField(dim={})", self.inner.dim())
    }
}

/// Finite Gaussian mixture on ℝⁿ.
#[pyclass(name = "GaussianMixture", skip_from_py_object)]
#[derive(Clone)]
struct PyGaussianMixture {
    inner: GaussianMixture,
}

#[pymethods]
impl PyGaussianMixture {
    /// GaussianMixture(dim, components) with components a list of
    /// (weight, mean, cov) triples.
    #[new]
    fn new(dim: usize, components: Vec<(f64, Vec<f64>, Vec<Vec<f64>>)>) -> PyResult<Self> {
        Ok(PyGaussianMixture {
            inner: GaussianMixture::new(dim, components).map_err(to_py_err)?,
        })
    }

    #[staticmethod]
    fn standard(dim: usize) -> Self {
        PyGaussianMixture {
            inner: GaussianMixture::standard(dim),
        }
    }

    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        let spec = serde_json::from_str(text)
            .map_err(|e| PyValueError::new_err(format!("bad measure spec: {e}")))?;
        Ok(PyGaussianMixture {
            inner: GaussianMixture::from_spec(&spec).map_err(to_py_err)?,
        })
    }

    fn to_json(&self) -> PyResult<String> {
        serde_json::to_string_pretty(&self.inner.to_spec())
            .map_err(|e| PyRuntimeError::new_err(e.to_string()))
    }

    fn density_vs_mu(&self, x: Vec<f64>) -> PyResult<f64> {
        self.inner.density_vs_mu(&x).map_err(to_py_err)
    }

    fn ou_smooth(&self, t: f64) -> PyResult<Self> {
        Ok(PyGaussianMixture {
            inner: self.inner.ou_smooth(t).map_err(to_py_err)?,
        })
    }

    fn epsilon_mix(&self, epsilon: f64) -> PyResult<Self> {
        Ok(PyGaussianMixture {
            inner: self.inner.epsilon_mix(epsilon).map_err(to_py_err)?,
        })
    }

    fn project(&self, k: usize) -> PyResult<Self> {
        Ok(PyGaussianMixture {
            inner: self.inner.project(k).map_err(to_py_err)?,
        })
    }

    /// `count` seeded draws, returned as a list of points.
    fn sample(&self, count: usize, seed: u64) -> PyResult<Vec<Vec<f64>>> {
        use rand::SeedableRng;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        Ok(self
            .inner
            .sample(count, &mut rng)
            .map_err(to_py_err)?
            .atoms()
            .to_vec())
    }

    fn dim(&self) -> usize {
        self.inner.dim()
    }

    fn __repr__(&self) -> String {
        format!(
            "GaussianMixture(dim={}, components={})",
            self.inner.dim(),
            self.inner.components().len()
        )
    }
}

/// Normalized probabilists' Hermite polynomial h_k(x).
#[pyfunction]
fn hermite_eval(k: u32, x: f64) -> f64 {
    krdiv::chaos::hermite_eval(k, x)
}

/// Stochastic derivative D.
#[pyfunction]
fn derivative(f: &PyChaosFn) -> PyVectorField {
    PyVectorField {
        inner: krdiv::malliavin::derivative(&f.inner),
    }
}

/// Divergence I (adjoint of D).
#[pyfunction]
fn divergence(u: &PyVectorField) -> PyChaosFn {
    PyChaosFn {
        inner: krdiv::malliavin::divergence(&u.inner),
    }
}

/// Number operator L = ID.
#[pyfunction]
fn number_operator(f: &PyChaosFn) -> PyChaosFn {
    PyChaosFn {
        inner: krdiv::malliavin::number_operator(&f.inner),
    }
}

/// Ornstein–Uhlenbeck semigroup T_t (spectral form).
#[pyfunction]
fn ou_semigroup(f: &PyChaosFn, t: f64) -> PyResult<PyChaosFn> {
    Ok(PyChaosFn {
        inner: krdiv::malliavin::ou_semigroup(&f.inner, t).map_err(to_py_err)?,
    })
}

/// Minimal-L² preimage of Iu = α − Eα.
#[pyfunction]
fn min_norm_field(alpha: &PyChaosFn) -> PyVectorField {
    PyVectorField {
        inner: krdiv::malliavin::min_norm_field(&alpha.inner),
    }
}

/// The (1+L)⁻¹Dα preimage.
#[pyfunction]
fn feyel_ustunel_field(alpha: &PyChaosFn) -> PyVectorField {
    PyVectorField {
        inner: krdiv::malliavin::feyel_ustunel_field(&alpha.inner),
    }
}

/// Chaos projection of d(ν₁−ν₀)/dμ at the given degree, mean re-zeroed.
#[pyfunction]
fn difference_density(
    nu1: &PyGaussianMixture,
    nu0: &PyGaussianMixture,
    degree: u32,
    nodes_per_axis: usize,
) -> PyResult<PyChaosFn> {
    let grid = gauss_hermite_grid(nu1.inner.dim(), nodes_per_axis).map_err(to_py_err)?;
    let (alpha, _) =
        difference_density_chaos(&nu1.inner, &nu0.inner, degree, &grid).map_err(to_py_err)?;
    Ok(PyChaosFn { inner: alpha })
}

/// Exact 1-D W₁ by the CDF-difference integral.
#[pyfunction]
fn w1_exact_1d(
    nu0: &PyGaussianMixture,
    nu1: &PyGaussianMixture,
    resolution: usize,
) -> PyResult<f64> {
    krdiv::transport::w1_exact_1d(&nu0.inner, &nu1.inner, resolution).map_err(to_py_err)
}

/// Sampled LP estimate of W₁: (estimate, stderr).
#[pyfunction]
fn w1_sampled(
    nu0: &PyGaussianMixture,
    nu1: &PyGaussianMixture,
    samples: usize,
    replications: usize,
    seed: u64,
) -> PyResult<(f64, f64)> {
    let est = krdiv::transport::w1_estimate(&nu0.inner, &nu1.inner, samples, replications, seed)
        .map_err(to_py_err)?;
    Ok((est.estimate, est.stderr))
}

/// `(source, target, flow)` triples of a transport plan.
type PlanTriples = Vec<(usize, usize, f64)>;

/// Exact transport cost between two weighted atom clouds, plus the plan
/// as (source, target, flow) triples.
#[pyfunction]
fn w1_lp(
    atoms_a: Vec<Vec<f64>>,
    weights_a: Vec<f64>,
    atoms_b: Vec<Vec<f64>>,
    weights_b: Vec<f64>,
) -> PyResult<(f64, PlanTriples)> {
    let dim = atoms_a.first().map(|a| a.len()).unwrap_or(0);
    let a = DiscreteMeasure::new(dim, atoms_a, weights_a).map_err(to_py_err)?;
    let b = DiscreteMeasure::new(dim, atoms_b, weights_b).map_err(to_py_err)?;
    let plan = krdiv::transport::w1_lp(&a, &b).map_err(to_py_err)?;
    let triples = plan
        .sources
        .iter()
        .zip(&plan.targets)
        .zip(&plan.flows)
        .map(|((&s, &t), &f)| (s, t, f))
        .collect();
    Ok((plan.cost, triples))
}

/// Kantorovich dual lower bound: (bound, potential values, lipschitz_cert).
#[pyfunction]
fn w1_dual_lb(
    atoms_a: Vec<Vec<f64>>,
    weights_a: Vec<f64>,
    atoms_b: Vec<Vec<f64>>,
    weights_b: Vec<f64>,
) -> PyResult<(f64, Vec<f64>, f64)> {
    let dim = atoms_a.first().map(|a| a.len()).unwrap_or(0);
    let a = DiscreteMeasure::new(dim, atoms_a, weights_a).map_err(to_py_err)?;
    let b = DiscreteMeasure::new(dim, atoms_b, weights_b).map_err(to_py_err)?;
    let (bound, pot) = krdiv::transport::w1_dual_lb(&a, &b).map_err(to_py_err)?;
    Ok((bound, pot.values, pot.lipschitz_cert))
}

/// Minimize E|u| over divergence preimages of α at degree d. Returns
/// (value, residual, iterations, converged).
#[pyfunction]
fn minimize_l1(
    alpha: &PyChaosFn,
    degree: u32,
    nodes_per_axis: usize,
    budget: usize,
) -> PyResult<(f64, f64, usize, bool)> {
    let grid = gauss_hermite_grid(alpha.inner.dim(), nodes_per_axis).map_err(to_py_err)?;
    let res = krdiv::minimize::minimize_l1(
        &alpha.inner,
        degree,
        &MinimizeOptions {
            budget,
            lower_bound: None,
            eval: EvalSet::from_grid(&grid),
        },
    )
    .map_err(to_py_err)?;
    Ok((res.value, res.residual, res.iterations, res.converged))
}

/// Full sandwich run; returns the gap report as a JSON string.
#[pyfunction]
#[allow(clippy::too_many_arguments)]
fn theorem_gap(
    nu0: &PyGaussianMixture,
    nu1: &PyGaussianMixture,
    degree: u32,
    nodes_per_axis: usize,
    epsilon: f64,
    budget: usize,
    seed: u64,
    samples: usize,
    replications: usize,
) -> PyResult<String> {
    let cfg = GapConfig {
        degree,
        nodes_per_axis,
        epsilon,
        budget,
        seed,
        samples,
        replications,
        resolution: 20001,
    };
    let report =
        krdiv::minimize::theorem_gap(&nu0.inner, &nu1.inner, &cfg).map_err(to_py_err)?;
    serde_json::to_string(&report).map_err(|e| PyRuntimeError::new_err(e.to_string()))
}

#[pymodule]
fn krdiv_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyChaosFn>()?;
    m.add_class::<PyVectorField>()?;
    m.add_class::<PyGaussianMixture>()?;
    m.add_function(wrap_pyfunction!(hermite_eval, m)?)?;
    m.add_function(wrap_pyfunction!(derivative, m)?)?;
    m.add_function(wrap_pyfunction!(divergence, m)?)?;
    m.add_function(wrap_pyfunction!(number_operator, m)?)?;
    m.add_function(wrap_pyfunction!(ou_semigroup, m)?)?;
    m.add_function(wrap_pyfunction!(min_norm_field, m)?)?;
    m.add_function(wrap_pyfunction!(feyel_ustunel_field, m)?)?;
    m.add_function(wrap_pyfunction!(difference_density, m)?)?;
    m.add_function(wrap_pyfunction!(w1_exact_1d, m)?)?;
    m.add_function(wrap_pyfunction!(w1_sampled, m)?)?;
    m.add_function(wrap_pyfunction!(w1_lp, m)?)?;
    m.add_function(wrap_pyfunction!(w1_dual_lb, m)?)?;
    m.add_function(wrap_pyfunction!(minimize_l1, m)?)?;
    m.add_function(wrap_pyfunction!(theorem_gap, m)?)?;
    Ok(())
}
