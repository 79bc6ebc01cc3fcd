//! Python bindings: exact distributions, forecaster configs, simulation,
//! calibration metrics, certificates and the hard-sequence tools.

use num_bigint::BigUint;
use pyo3::create_exception;
use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;
use pyo3::types::PyDict;

use hicalib_core::adversary::{day_distribution, sample_tau_tree, HardSeqConfig};
use hicalib_core::certificate::{certify, CertificateReport};
use hicalib_core::forecaster::{paper_parameters, ForecastConfig, Forecaster, HierarchicalForecaster, Mode};
use hicalib_core::harness::config::{AdversarySpec, RunConfig};
use hicalib_core::harness::lowerbound::run_lowerbound;
use hicalib_core::harness::protocol::SimOptions;
use hicalib_core::harness::simulate_run;
use hicalib_core::metrics::{dce, ece_trajectory};
use hicalib_core::rng::{stream, Role};
use hicalib_core::simplex::{self, KeyTable, Outcome, RationalDist};
use hicalib_core::transcript::Transcript;

create_exception!(hicalib, HicalibError, PyValueError);

fn err(e: hicalib_core::Error) -> PyErr {
    HicalibError::new_err(e.to_string())
}

/// An exact probability distribution over `[d]`.
#[pyclass(name = "Dist", frozen, eq, hash, skip_from_py_object)]
#[derive(Clone, PartialEq, Eq, Hash)]
struct PyDist {
    inner: RationalDist,
}

#[pymethods]
impl PyDist {
    #[new]
    fn new(numerators: Vec<BigUint>, denominator: BigUint) -> PyResult<Self> {
        RationalDist::new(numerators, denominator)
            .map(|inner| Self { inner })
            .map_err(err)
    }

    #[staticmethod]
    fn uniform(d: usize) -> PyResult<Self> {
        if d < 2 {
            return Err(err(hicalib_core::Error::TooFewOutcomes(d)));
        }
        Ok(Self {
            inner: RationalDist::uniform(d),
        })
    }

    /// Point mass on the 1-based outcome `i`.
    #[staticmethod]
    fn point_mass(d: usize, i: usize) -> PyResult<Self> {
        let x = Outcome::new(i, d).map_err(err)?;
        Ok(Self {
            inner: RationalDist::point_mass(d, x),
        })
    }

    #[getter]
    fn dim(&self) -> usize {
        self.inner.dim()
    }

    #[getter]
    fn numerators(&self) -> Vec<BigUint> {
        self.inner.numerators().to_vec()
    }

    #[getter]
    fn denominator(&self) -> BigUint {
        self.inner.denominator().clone()
    }

    fn to_floats(&self) -> Vec<f64> {
        self.inner.to_f64_vec()
    }

    fn __repr__(&self) -> String {
        format!("Dist({:?})", self.inner)
    }
}

#[pyfunction]
fn l1_distance(a: &PyDist, b: &PyDist) -> PyResult<f64> {
    simplex::l1_distance(&a.inner, &b.inner).map_err(err)
}

#[pyfunction]
fn kl_divergence(x: &PyDist, p: &PyDist) -> PyResult<f64> {
    simplex::kl_divergence(&x.inner, &p.inner).map_err(err)
}

#[pyfunction]
fn entropy(x: &PyDist) -> f64 {
    simplex::entropy(&x.inner)
}

/// Forecaster parameters `(d, L, H, S, m)`.
#[pyclass(name = "ForecastConfig", frozen, eq, skip_from_py_object)]
#[derive(Clone, PartialEq)]
struct PyForecastConfig {
    inner: ForecastConfig,
}

#[pymethods]
impl PyForecastConfig {
    #[new]
    #[pyo3(signature = (d, L, H, S, m))]
    #[allow(non_snake_case)]
    fn new(d: usize, L: usize, H: u64, S: u64, m: u64) -> PyResult<Self> {
        ForecastConfig::new(d, L, H, S, m)
            .map(|inner| Self { inner })
            .map_err(err)
    }

    /// The coupled choice `m = ⌈1/ε⌉, H = m⁴, L = ⌈ln(d)·m²⌉, S = d³m⁶`.
    #[staticmethod]
    #[pyo3(signature = (d, epsilon, budget = hicalib_core::forecaster::DEFAULT_DAY_BUDGET))]
    fn paper_parameters(d: usize, epsilon: f64, budget: u64) -> PyResult<Self> {
        paper_parameters(d, epsilon, budget)
            .map(|inner| Self { inner })
            .map_err(err)
    }

    #[getter]
    fn d(&self) -> usize {
        self.inner.d
    }

    #[getter(L)]
    fn levels(&self) -> usize {
        self.inner.levels
    }

    #[getter(H)]
    fn iterations(&self) -> u64 {
        self.inner.iterations
    }

    #[getter(S)]
    fn base_len(&self) -> u64 {
        self.inner.base_len
    }

    #[getter]
    fn m(&self) -> u64 {
        self.inner.m
    }

    #[getter(T)]
    fn horizon(&self) -> u64 {
        self.inner.horizon()
    }

    fn level_len(&self, level: usize) -> PyResult<u64> {
        if level > self.inner.levels {
            return Err(HicalibError::new_err(format!("level {level} > L = {}", self.inner.levels)));
        }
        Ok(self.inner.level_len(level))
    }

    fn __repr__(&self) -> String {
        let c = &self.inner;
        format!("ForecastConfig(d={}, L={}, H={}, S={}, m={})", c.d, c.levels, c.iterations, c.base_len, c.m)
    }
}

/// The hierarchical forecaster, driven one day at a time.
#[pyclass(name = "HierarchicalForecaster")]
struct PyForecaster {
    inner: HierarchicalForecaster,
    keys: KeyTable,
}

#[pymethods]
impl PyForecaster {
    #[new]
    fn new(config: &PyForecastConfig) -> Self {
        Self {
            inner: HierarchicalForecaster::new(config.inner),
            keys: KeyTable::new(),
        }
    }

    /// Day `t`'s mixture as `(prediction, weight numerator, weight denominator)`.
    fn mixture(&mut self, t: u64) -> PyResult<Vec<(PyDist, u64, u64)>> {
        let mixture = self.inner.mixture(t, &mut self.keys, None).map_err(err)?;
        Ok(mixture
            .entries
            .iter()
            .map(|e| {
                let inner = self.keys.get(e.key).clone();
                (PyDist { inner }, e.weight, mixture.denominator)
            })
            .collect())
    }

    fn observe(&mut self, t: u64, outcome: usize) -> PyResult<()> {
        let x = Outcome::new(outcome, self.inner.config().d).map_err(err)?;
        self.inner.observe(t, x).map_err(err)
    }
}

#[pyclass(name = "Certificate", frozen)]
struct PyCertificate {
    inner: CertificateReport,
}

#[pymethods]
impl PyCertificate {
    #[getter]
    fn passed(&self) -> bool {
        self.inner.passed()
    }

    /// Names and scopes of the failing checks.
    fn failures(&self) -> Vec<(String, String)> {
        self.inner.failures().map(|c| (c.name.clone(), c.scope.clone())).collect()
    }

    /// `{"A0", "A1", "A2", "A3", "K_bar", "telescope_residual"}`.
    fn chain<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyDict>> {
        let c = &self.inner.chain;
        let out = PyDict::new(py);
        out.set_item("A0", c.a0)?;
        out.set_item("A1", c.a1)?;
        out.set_item("A2", c.a2)?;
        out.set_item("A3", c.a3)?;
        out.set_item("K_bar", c.k_bar)?;
        out.set_item("telescope_residual", c.telescope_residual)?;
        Ok(out)
    }

    fn to_json(&self) -> PyResult<String> {
        self.inner.to_json().map_err(err)
    }
}

#[pyclass(name = "Transcript")]
struct PyTranscript {
    inner: Transcript,
}

#[pymethods]
impl PyTranscript {
    #[getter]
    fn d(&self) -> usize {
        self.inner.d()
    }

    #[getter(T)]
    fn horizon(&self) -> u64 {
        self.inner.horizon()
    }

    #[getter]
    fn run_id(&self) -> String {
        self.inner.header.run_id.clone()
    }

    /// 1-based outcomes, day by day.
    fn outcomes(&self) -> Vec<usize> {
        self.inner.outcomes().iter().map(|x| x.index()).collect()
    }

    fn dce(&self) -> PyResult<f64> {
        dce(&self.inner).map_err(err)
    }

    /// ECE of the realized predictions (sampled runs only).
    fn ece(&self) -> PyResult<f64> {
        ece_trajectory(&self.inner).map_err(err)
    }

    fn certify(&self) -> PyResult<PyCertificate> {
        certify(&self.inner).map(|inner| PyCertificate { inner }).map_err(err)
    }

    fn to_jsonl(&self) -> PyResult<String> {
        let mut buf = Vec::new();
        self.inner.write_jsonl(&mut buf).map_err(err)?;
        String::from_utf8(buf).map_err(|e| HicalibError::new_err(e.to_string()))
    }

    #[staticmethod]
    fn from_jsonl(text: &str) -> PyResult<Self> {
        Transcript::read_jsonl(text.as_bytes())
            .map(|inner| Self { inner })
            .map_err(err)
    }
}

fn parse_mode(mode: &str) -> PyResult<Mode> {
    mode.parse().map_err(err)
}

/// Runs the hierarchical forecaster against `adversary` (`"iid"` with
/// integer weights `q`, `"adaptive_argmin"`, or `"hard"` with `R`, `K`).
#[pyfunction]
#[pyo3(signature = (config, seed, adversary = "iid", q = None, mode = "distributional", R = None, K = None, trial = 0))]
#[allow(non_snake_case, clippy::too_many_arguments)]
fn simulate(
    config: &PyForecastConfig,
    seed: u64,
    adversary: &str,
    q: Option<Vec<u64>>,
    mode: &str,
    R: Option<u32>,
    K: Option<u32>,
    trial: u64,
) -> PyResult<PyTranscript> {
    let fc = config.inner;
    let spec = match adversary {
        "iid" => AdversarySpec::Iid(match q {
            Some(w) if w.len() == fc.d => RationalDist::from_weights(&w).map_err(err)?,
            Some(w) => return Err(HicalibError::new_err(format!("q has {} weights, d = {}", w.len(), fc.d))),
            None => RationalDist::uniform(fc.d),
        }),
        "adaptive_argmin" => AdversarySpec::AdaptiveArgmin,
        "hard" => {
            let (r, k) = R.zip(K).ok_or_else(|| HicalibError::new_err("hard adversary needs R and K"))?;
            let hard = HardSeqConfig::new(r, k).map_err(err)?;
            if hard.d() != fc.d || hard.horizon() != fc.horizon() {
                return Err(HicalibError::new_err("hard sequence shape does not match the config"));
            }
            AdversarySpec::Hard(hard)
        }
        other => return Err(HicalibError::new_err(format!("unknown adversary {other:?}"))),
    };
    let mode = parse_mode(mode)?;
    let cfg = RunConfig {
        forecast: fc,
        mode,
        seed: Some(seed),
        adversary: spec,
        trials: 2,
        budget: hicalib_core::forecaster::DEFAULT_DAY_BUDGET,
        record_adversary: false,
    };
    let opts = SimOptions {
        mode,
        record_adversary: false,
    };
    simulate_run(&cfg, seed, trial, opts)
        .map(|inner| PyTranscript { inner })
        .map_err(err)
}

/// Day-`t` outcome law of the hard sequence whose tau tree is drawn from
/// `(seed, trial)`.
#[pyfunction]
#[pyo3(signature = (R, K, seed, t, trial = 0))]
#[allow(non_snake_case)]
fn hard_day_distribution(R: u32, K: u32, seed: u64, t: u64, trial: u64) -> PyResult<PyDist> {
    let cfg = HardSeqConfig::new(R, K).map_err(err)?;
    let tree = sample_tau_tree(&cfg, &mut stream(seed, Role::Tau, trial));
    day_distribution(&tree, t, &cfg)
        .map(|inner| PyDist { inner })
        .map_err(err)
}

/// Monte Carlo DCE of a simple forecaster on the hard sequence.
#[pyfunction]
#[pyo3(signature = (R, K, forecaster = "truthful", trials = 500, seed = 0))]
#[allow(non_snake_case)]
fn lowerbound<'py>(
    py: Python<'py>,
    R: u32,
    K: u32,
    forecaster: &str,
    trials: usize,
    seed: u64,
) -> PyResult<Bound<'py, PyDict>> {
    let r = py
        .detach(|| run_lowerbound(R, K, forecaster, trials, seed))
        .map_err(err)?;
    let out = PyDict::new(py);
    out.set_item("R", r.levels)?;
    out.set_item("K", r.blocks)?;
    out.set_item("d", r.d)?;
    out.set_item("T", r.horizon)?;
    out.set_item("forecaster", r.forecaster)?;
    out.set_item("trials", r.trials)?;
    out.set_item("mean_dce", r.mean_dce)?;
    out.set_item("stderr", r.stderr)?;
    out.set_item("reference", r.reference)?;
    out.set_item("pass", r.pass)?;
    Ok(out)
}

#[pymodule]
fn hicalib(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("HicalibError", m.py().get_type::<HicalibError>())?;
    m.add_class::<PyDist>()?;
    m.add_class::<PyForecastConfig>()?;
    m.add_class::<PyForecaster>()?;
    m.add_class::<PyTranscript>()?;
    m.add_class::<PyCertificate>()?;
    m.add_function(wrap_pyfunction!(l1_distance, m)?)?;
    m.add_function(wrap_pyfunction!(kl_divergence, m)?)?;
    m.add_function(wrap_pyfunction!(entropy, m)?)?;
    m.add_function(wrap_pyfunction!(simulate, m)?)?;
    m.add_function(wrap_pyfunction!(hard_day_distribution, m)?)?;
    m.add_function(wrap_pyfunction!(lowerbound, m)?)?;
    Ok(())
}
