//! Python bindings: configs, training runs, checkpoints, sampling,
//! evaluation, the metric functions and the gradient checks.

use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

use hgan_core::checkpoint::Checkpoint;
use hgan_core::config::ExperimentConfig;
use hgan_core::metrics::{self, ModeHistogram, KL_SMOOTHING};
use hgan_core::training::{StepMetrics, Trainer};
use hgan_core::{data, eval, gradcheck, runner, Error, Tensor};

fn err(e: Error) -> PyErr {
    match e {
        Error::NonFinite(_) | Error::Eigen(_) | Error::Projection(_) | Error::Io(_) => PyRuntimeError::new_err(e.to_string()),
        _ => PyValueError::new_err(e.to_string()),
    }
}

fn to_rows(t: &Tensor) -> Vec<Vec<f64>> {
    (0..t.rows()).map(|r| t.row(r).to_vec()).collect()
}

fn from_rows(rows: Vec<Vec<f64>>) -> PyResult<Tensor> {
    Tensor::from_rows(&rows).map_err(|e| err(e.into()))
}

fn metrics_dict<'py>(py: Python<'py>, m: &StepMetrics) -> PyResult<Bound<'py, PyDict>> {
    let d = PyDict::new(py);
    d.set_item("step", m.step)?;
    d.set_item("loss_d", m.loss_d)?;
    d.set_item("loss_g", m.loss_g)?;
    d.set_item("loss_ar", m.loss_ar)?;
    d.set_item("sr1", m.sr1)?;
    d.set_item("sr2", m.sr2)?;
    d.set_item("sf1", m.sf1)?;
    d.set_item("sf2", m.sf2)?;
    Ok(d)
}

/// Experiment settings in the `key = value` file format.
#[pyclass(name = "ExperimentConfig", from_py_object)]
#[derive(Clone)]
struct PyConfig {
    inner: ExperimentConfig,
}

#[pymethods]
impl PyConfig {
    #[new]
    #[pyo3(signature = (text = None))]
    fn new(text: Option<&str>) -> PyResult<Self> {
        let inner = match text {
            Some(t) => ExperimentConfig::parse(t).map_err(err)?,
            None => ExperimentConfig::default(),
        };
        Ok(Self { inner })
    }

    fn to_text(&self) -> String {
        self.inner.serialize()
    }

    #[getter]
    fn variant(&self) -> String {
        self.inner.training.variant.to_string()
    }

    #[setter]
    fn set_variant(&mut self, v: &str) -> PyResult<()> {
        self.inner.training.variant = v.parse().map_err(PyValueError::new_err)?;
        Ok(())
    }

    #[getter]
    fn seed(&self) -> u64 {
        self.inner.training.seed
    }

    #[setter]
    fn set_seed(&mut self, s: u64) {
        self.inner.training.seed = s;
    }

    #[getter]
    fn steps(&self) -> u64 {
        self.inner.training.steps
    }

    #[setter]
    fn set_steps(&mut self, s: u64) {
        self.inner.training.steps = s;
    }

    #[getter]
    fn learning_rate(&self) -> f64 {
        self.inner.training.optimizer.learning_rate
    }

    #[getter]
    fn batch(&self) -> usize {
        self.inner.training.batch
    }

    fn __repr__(&self) -> String {
        format!(
            "ExperimentConfig(variant={}, seed={}, steps={})",
            self.inner.training.variant, self.inner.training.seed, self.inner.training.steps
        )
    }
}

/// Trained networks with optimizer and stream state.
#[pyclass(name = "Checkpoint", skip_from_py_object)]
struct PyCheckpoint {
    inner: Checkpoint,
}

#[pymethods]
impl PyCheckpoint {
    #[staticmethod]
    fn load(path: &str) -> PyResult<Self> {
        Ok(Self {
            inner: Checkpoint::load(path).map_err(err)?,
        })
    }

    #[staticmethod]
    fn from_bytes(bytes: &[u8]) -> PyResult<Self> {
        Ok(Self {
            inner: Checkpoint::from_bytes(bytes).map_err(err)?,
        })
    }

    fn save(&self, path: &str) -> PyResult<()> {
        self.inner.save(path).map_err(err)
    }

    fn to_bytes(&self) -> Vec<u8> {
        self.inner.to_bytes()
    }

    #[getter]
    fn step(&self) -> u64 {
        self.inner.step
    }

    #[getter]
    fn config(&self) -> PyConfig {
        PyConfig {
            inner: self.inner.config.clone(),
        }
    }

    /// First `n` generator draws of the evaluation stream for `seed`.
    fn sample(&self, n: usize, seed: u64) -> PyResult<Vec<Vec<f64>>> {
        match runner::draw_samples(&self.inner.nets.generator, n, seed).map_err(err)? {
            Some(t) => Ok(to_rows(&t)),
            None => Ok(Vec::new()),
        }
    }

    /// Full evaluation report as a dict keyed like the CSV header.
    #[pyo3(signature = (seed, samples = None))]
    fn evaluate<'py>(&self, py: Python<'py>, seed: u64, samples: Option<usize>) -> PyResult<Bound<'py, PyDict>> {
        let mut cfg = self.inner.config.clone();
        if let Some(n) = samples {
            cfg.evaluation.samples = n;
        }
        let r = runner::evaluate(&self.inner, &cfg, seed).map_err(err)?;
        let d = PyDict::new(py);
        d.set_item("kl", r.kl_divergence)?;
        d.set_item("chi2", r.chi_square)?;
        d.set_item("modes_covered", r.modes_covered)?;
        d.set_item("mode_score", r.surrogate_mode_score)?;
        d.set_item("frechet", r.surrogate_frechet)?;
        d.set_item("n", r.sample_count)?;
        d.set_item("clf_acc", r.classifier_accuracy)?;
        Ok(d)
    }

    /// Exact mode label of each row under the checkpoint's dataset.
    fn mode_of(&self, rows: Vec<Vec<f64>>) -> PyResult<Vec<usize>> {
        let ds = self.inner.config.training.dataset.build().map_err(err)?;
        Ok(rows.iter().map(|r| ds.mode_of(r)).collect())
    }
}

/// A training run that can be stepped from Python.
#[pyclass(name = "Run", skip_from_py_object)]
struct PyRun {
    trainer: Trainer,
    config: ExperimentConfig,
}

#[pymethods]
impl PyRun {
    #[new]
    fn new(config: PyConfig) -> PyResult<Self> {
        let trainer = Trainer::new(config.inner.training.clone()).map_err(err)?;
        Ok(Self {
            trainer,
            config: config.inner,
        })
    }

    fn step<'py>(&mut self, py: Python<'py>) -> PyResult<Bound<'py, PyDict>> {
        let m = self.trainer.step().map_err(err)?;
        metrics_dict(py, &m)
    }

    /// Runs to the configured step count; returns the logged rows.
    fn run<'py>(&mut self, py: Python<'py>) -> PyResult<Vec<Bound<'py, PyDict>>> {
        let log = self.trainer.run().map_err(err)?;
        log.iter().map(|m| metrics_dict(py, m)).collect()
    }

    #[getter]
    fn steps_done(&self) -> u64 {
        self.trainer.steps_done()
    }

    fn checkpoint(&self) -> PyCheckpoint {
        PyCheckpoint {
            inner: Checkpoint::from_trainer(&self.trainer, &self.config),
        }
    }
}

/// `(samples, labels)` from an `k`-mode ring.
#[pyfunction]
fn sample_ring(k: usize, radius: f64, std: f64, n: usize, seed: u64) -> PyResult<(Vec<Vec<f64>>, Vec<usize>)> {
    let b = data::sample_ring(k, radius, std, n, seed).map_err(err)?;
    Ok((to_rows(&b.samples), b.labels))
}

#[pyfunction]
#[pyo3(signature = (p, q, smoothing = KL_SMOOTHING))]
fn kl_divergence(p: Vec<u64>, q: Vec<u64>, smoothing: f64) -> PyResult<f64> {
    metrics::kl_divergence(&ModeHistogram::new(p), &ModeHistogram::new(q), smoothing).map_err(err)
}

#[pyfunction]
fn chi_square(observed: Vec<u64>, expected: Vec<u64>) -> PyResult<f64> {
    metrics::chi_square(&ModeHistogram::new(observed), &ModeHistogram::new(expected)).map_err(err)
}

#[pyfunction]
#[pyo3(signature = (counts, min_count = 1))]
fn modes_covered(counts: Vec<u64>, min_count: u64) -> usize {
    metrics::modes_covered(&ModeHistogram::new(counts), min_count)
}

#[pyfunction]
fn mode_score(probabilities: Vec<Vec<f64>>) -> PyResult<f64> {
    metrics::mode_score(&from_rows(probabilities)?).map_err(err)
}

#[pyfunction]
fn frechet_distance(real: Vec<Vec<f64>>, fake: Vec<Vec<f64>>) -> PyResult<f64> {
    metrics::frechet_distance(&from_rows(real)?, &from_rows(fake)?).map_err(err)
}

/// `(name, max_error, passed)` for every gradient check.
#[pyfunction]
fn gradcheck_all() -> Vec<(String, f64, bool)> {
    gradcheck::run_all()
        .into_iter()
        .map(|r| {
            let ok = r.passed();
            (r.name, r.max_error, ok)
        })
        .collect()
}

/// Evaluates raw samples against a fresh ground-truth draw of `config`'s
/// dataset.
#[pyfunction]
fn evaluate_samples(config: PyConfig, samples: Vec<Vec<f64>>, seed: u64) -> PyResult<(f64, f64, usize)> {
    let ds = config.inner.training.dataset.build().map_err(err)?;
    let ev = eval::Evaluator::new(ds, config.inner.evaluation.clone(), seed).map_err(err)?;
    let r = ev.evaluate_samples(&from_rows(samples)?, seed).map_err(err)?;
    Ok((r.kl_divergence, r.chi_square, r.modes_covered))
}

#[pymodule]
fn hgan(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyConfig>()?;
    m.add_class::<PyCheckpoint>()?;
    m.add_class::<PyRun>()?;
    m.add_function(wrap_pyfunction!(sample_ring, m)?)?;
    m.add_function(wrap_pyfunction!(kl_divergence, m)?)?;
    m.add_function(wrap_pyfunction!(chi_square, m)?)?;
    m.add_function(wrap_pyfunction!(modes_covered, m)?)?;
    m.add_function(wrap_pyfunction!(mode_score, m)?)?;
    m.add_function(wrap_pyfunction!(frechet_distance, m)?)?;
    m.add_function(wrap_pyfunction!(gradcheck_all, m)?)?;
    m.add_function(wrap_pyfunction!(evaluate_samples, m)?)?;
    Ok(())
}
