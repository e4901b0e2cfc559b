use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;

use ndbal::diameter::{avg_diam_exact, avg_dist_to_target_exact, stopping_n_t};
use ndbal::harness::experiment::run_experiment_with_jobs;
use ndbal::harness::verify::run_quick_checks;
use ndbal::harness::{bootstrap_ci as core_bootstrap, ExperimentConfig};
use ndbal::instances::finite::RandomFiniteInstance;
use ndbal::instances::interval::{d_interval_c, d_interval_i, Interval, IntervalClustering};
use ndbal::instances::linear::d_classifier;
use ndbal::instances::ranking::rank_distance as core_rank_distance;
use ndbal::samplers::{ContinuousPosterior, SamplerSettings};
use ndbal::select::{exact_average_split, pair_bound as core_pair_bound, threshold_n as core_threshold_n};
use ndbal::splitting::{rho_star as core_rho_star, wilson_interval as core_wilson};
use ndbal::{Atom, NdbalError, PosteriorHandle, Response, RngStream, UpdateRule};

fn to_py(e: NdbalError) -> PyErr {
    match e {
        NdbalError::Config { .. } | NdbalError::InvalidParameter(_) | NdbalError::IncompatibleAtom(_) => {
            PyValueError::new_err(e.to_string())
        }
        _ => PyRuntimeError::new_err(e.to_string()),
    }
}

/// Random finite instance: response tables, a distance matrix, a prior and
/// a target, with exact posterior updates.
#[pyclass(name = "FiniteInstance")]
struct PyFiniteInstance {
    inst: RandomFiniteInstance,
}

#[pymethods]
impl PyFiniteInstance {
    #[new]
    #[pyo3(signature = (n_structures, n_atoms, n_responses=2, seed=0))]
    fn new(n_structures: usize, n_atoms: usize, n_responses: usize, seed: u64) -> PyResult<Self> {
        let mut rng = RngStream::new(seed, "py-finite");
        let inst = RandomFiniteInstance::generate(n_structures, n_atoms, n_responses, &mut rng).map_err(to_py)?;
        Ok(PyFiniteInstance { inst })
    }

    #[getter]
    fn target(&self) -> usize {
        self.inst.g_star
    }

    #[getter]
    fn weights(&self) -> Vec<f64> {
        self.inst.prior.probabilities()
    }

    fn avg_diam(&self) -> f64 {
        avg_diam_exact(&self.inst.prior, &self.inst.distance)
    }

    fn avg_dist_to_target(&self) -> f64 {
        avg_dist_to_target_exact(&self.inst.prior, &self.inst.g_star, &self.inst.distance)
    }

    fn average_split(&self, atom: usize) -> PyResult<f64> {
        self.check_atom(atom)?;
        exact_average_split(&self.inst.prior, &Atom::new(atom as u64, atom), &self.inst.distance, &self.inst.space)
            .map_err(to_py)
    }

    /// Applies one observation. `rule` is "hard" or "soft01".
    #[pyo3(signature = (atom, response, rule="soft01", beta=1.0))]
    fn update(&mut self, atom: usize, response: usize, rule: &str, beta: f64) -> PyResult<()> {
        self.check_atom(atom)?;
        let rule = match rule {
            "hard" => UpdateRule::Hard,
            "soft01" => UpdateRule::Soft01 { beta },
            other => return Err(PyValueError::new_err(format!("unknown rule {other}"))),
        };
        PosteriorHandle::apply(&mut self.inst.prior, &self.inst.space, &Atom::new(atom as u64, atom), Response(response), rule)
            .map_err(to_py)
    }
}

impl PyFiniteInstance {
    fn check_atom(&self, atom: usize) -> PyResult<()> {
        if atom >= self.inst.space.n_atoms() {
            return Err(PyValueError::new_err(format!("atom {atom} out of range")));
        }
        Ok(())
    }
}

/// Gaussian-prior logistic posterior sampled by the Langevin chain.
#[pyfunction]
#[pyo3(signature = (dim, sigma, xs, ys, beta, n, seed=0))]
fn sample_logistic_posterior(
    dim: usize,
    sigma: f64,
    xs: Vec<Vec<f64>>,
    ys: Vec<f64>,
    beta: f64,
    n: usize,
    seed: u64,
) -> PyResult<Vec<Vec<f64>>> {
    if xs.len() != ys.len() {
        return Err(PyValueError::new_err("xs and ys differ in length"));
    }
    let mut post = ContinuousPosterior::new(dim, sigma, SamplerSettings::default()).map_err(to_py)?;
    for (x, y) in xs.into_iter().zip(ys) {
        post.add_term(x, y, beta).map_err(to_py)?;
    }
    let mut rng = RngStream::new(seed, "py-mala");
    post.sample_posterior(n, &mut rng).map_err(to_py)
}

/// Runs an experiment from its JSON config; returns the curve rows.
#[pyfunction]
#[pyo3(signature = (config_json, jobs=1))]
fn run_experiment(config_json: &str, jobs: usize) -> PyResult<Vec<(String, String, String, usize, f64, f64, f64)>> {
    let cfg = ExperimentConfig::from_json(config_json).map_err(to_py)?;
    let out = run_experiment_with_jobs(&cfg, jobs).map_err(to_py)?;
    Ok(out
        .curves
        .into_iter()
        .map(|p| (p.experiment, p.algorithm, p.trial_agg, p.round, p.error_mean, p.ci_low, p.ci_high))
        .collect())
}

/// Quick checks as `(id, name, passed, detail)`.
#[pyfunction]
#[pyo3(signature = (seed=0))]
fn verify(seed: u64) -> Vec<(u32, String, bool, String)> {
    run_quick_checks(seed)
        .into_iter()
        .map(|o| (o.id, o.name, o.passed, o.detail))
        .collect()
}

#[pyfunction]
#[pyo3(signature = (samples, level=0.68, resamples=1000, seed=0))]
fn bootstrap_ci(samples: Vec<f64>, level: f64, resamples: usize, seed: u64) -> PyResult<(f64, f64)> {
    let mut rng = RngStream::new(seed, "py-bootstrap");
    core_bootstrap(&samples, level, resamples, &mut rng).map_err(to_py)
}

#[pyfunction]
#[pyo3(signature = (k, n, level=0.95))]
fn wilson_interval(k: usize, n: usize, level: f64) -> PyResult<(f64, f64)> {
    core_wilson(k, n, level).map_err(to_py)
}

#[pyfunction]
fn threshold_n(alpha: f64, delta: f64, m: usize, y_count: usize) -> PyResult<f64> {
    core_threshold_n(alpha, delta, m, y_count).map_err(to_py)
}

#[pyfunction]
fn pair_bound(alpha: f64, delta: f64, m: usize, y_count: usize, rho: f64, avg_diam: f64) -> f64 {
    core_pair_bound(alpha, delta, m, y_count, rho, avg_diam)
}

#[pyfunction]
fn stopping_pairs(eps: f64, lambda_prior: f64, t: usize, delta: f64) -> PyResult<usize> {
    stopping_n_t(eps, lambda_prior, t, delta).map_err(to_py)
}

#[pyfunction]
fn rho_star(eps: f64) -> f64 {
    core_rho_star(eps)
}

#[pyfunction]
fn classifier_distance(w: Vec<f64>, v: Vec<f64>) -> PyResult<f64> {
    d_classifier(&w, &v).map_err(to_py)
}

#[pyfunction]
fn rank_distance(w: Vec<f64>, v: Vec<f64>) -> f64 {
    core_rank_distance(&w, &v)
}

/// Pair-clustering distance between two boundary lists on `[0, 1]`.
#[pyfunction]
fn interval_cluster_distance(g: Vec<f64>, h: Vec<f64>) -> PyResult<f64> {
    let g = IntervalClustering::new(g).map_err(to_py)?;
    let h = IntervalClustering::new(h).map_err(to_py)?;
    Ok(d_interval_c(&g, &h))
}

/// Identification distance for the cluster containing `[lo, hi]`.
#[pyfunction]
fn interval_identification_distance(g: Vec<f64>, h: Vec<f64>, lo: f64, hi: f64) -> PyResult<f64> {
    let i = Interval::new(lo, hi).map_err(to_py)?;
    let g = IntervalClustering::new(g).map_err(to_py)?;
    let h = IntervalClustering::new(h).map_err(to_py)?;
    d_interval_i(&g, &h, &i).map_err(to_py)
}

#[pymodule]
fn ndbal_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyFiniteInstance>()?;
    m.add_function(wrap_pyfunction!(sample_logistic_posterior, m)?)?;
    m.add_function(wrap_pyfunction!(run_experiment, m)?)?;
    m.add_function(wrap_pyfunction!(verify, m)?)?;
    m.add_function(wrap_pyfunction!(bootstrap_ci, m)?)?;
    m.add_function(wrap_pyfunction!(wilson_interval, m)?)?;
    m.add_function(wrap_pyfunction!(threshold_n, m)?)?;
    m.add_function(wrap_pyfunction!(pair_bound, m)?)?;
    m.add_function(wrap_pyfunction!(stopping_pairs, m)?)?;
    m.add_function(wrap_pyfunction!(rho_star, m)?)?;
    m.add_function(wrap_pyfunction!(classifier_distance, m)?)?;
    m.add_function(wrap_pyfunction!(rank_distance, m)?)?;
    m.add_function(wrap_pyfunction!(interval_cluster_distance, m)?)?;
    m.add_function(wrap_pyfunction!(interval_identification_distance, m)?)?;
    Ok(())
}
