use std::path::PathBuf;
use std::sync::Arc;

use fockherald::config::RunConfig;
use fockherald::design::{default_chi_max, solve_chi, DesignCache, SolveOutcome, SweepFilter, SweepRequest, SweepRow};
use fockherald::error::Error;
use fockherald::filtering::{FilterKind, FilterSpec};
use fockherald::herald::{HeraldModel, HeraldReport};
use fockherald::oracle::run_suite;
use fockherald::pdc::{build_jsa, CrystalSpec, JsaGrid, PmfKind, PumpSpec};
use fockherald::schmidt::{schmidt_decompose, SchmidtDecomposition};
use fockherald::units::{fwhm_nm_to_sigma, GridSpec};
use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;

fn err(e: Error) -> PyErr {
    match e {
        Error::InvalidInput(_) | Error::Config(_) | Error::MissingDispersion(_) | Error::DegenerateSlowness => {
            PyValueError::new_err(e.to_string())
        }
        _ => PyRuntimeError::new_err(e.to_string()),
    }
}

fn opt(x: Option<f64>) -> String {
    x.map_or_else(|| "None".into(), |v| v.to_string())
}

fn pmf_kind(name: &str) -> PyResult<PmfKind> {
    match name {
        "sinc" => Ok(PmfKind::Sinc),
        "gaussian" => Ok(PmfKind::Gaussian),
        _ => Err(PyValueError::new_err(format!(
            "unknown pmf {name:?} (expected sinc or gaussian)"
        ))),
    }
}

/// Spectral filter in front of the herald detector.
#[pyclass(name = "Filter", frozen, from_py_object)]
#[derive(Clone)]
struct PyFilter {
    spec: FilterSpec,
}

#[pymethods]
impl PyFilter {
    #[staticmethod]
    #[pyo3(signature = (eta = 1.0))]
    fn none(eta: f64) -> PyResult<Self> {
        Ok(PyFilter {
            spec: FilterSpec::new(FilterKind::None, eta).map_err(err)?,
        })
    }

    #[staticmethod]
    #[pyo3(signature = (mu_f, sigma_f, eta = 1.0))]
    fn gaussian(mu_f: f64, sigma_f: f64, eta: f64) -> PyResult<Self> {
        Ok(PyFilter {
            spec: FilterSpec::new(FilterKind::Gaussian { mu_f, sigma_f }, eta).map_err(err)?,
        })
    }

    #[staticmethod]
    #[pyo3(signature = (mu_f, eta = 1.0))]
    fn delta(mu_f: f64, eta: f64) -> PyResult<Self> {
        Ok(PyFilter {
            spec: FilterSpec::new(FilterKind::Delta { mu_f }, eta).map_err(err)?,
        })
    }

    #[getter]
    fn eta(&self) -> f64 {
        self.spec.eta
    }

    fn __repr__(&self) -> String {
        format!("Filter({:?}, eta={})", self.spec.kind, self.spec.eta)
    }
}

/// Sampled joint spectral amplitude.
#[pyclass(name = "Jsa", frozen)]
struct PyJsa {
    jsa: JsaGrid,
}

#[pymethods]
impl PyJsa {
    #[new]
    #[pyo3(signature = (mu_p, sigma_p, length, kp, ks, ki, n_points, span, center = None, pmf = "sinc"))]
    #[allow(clippy::too_many_arguments)]
    fn new(
        mu_p: f64,
        sigma_p: f64,
        length: f64,
        kp: f64,
        ks: f64,
        ki: f64,
        n_points: usize,
        span: f64,
        center: Option<f64>,
        pmf: &str,
    ) -> PyResult<Self> {
        let pump = PumpSpec::new(mu_p, sigma_p).map_err(err)?;
        let crystal = CrystalSpec::new(length, kp, ks, ki).map_err(err)?;
        let grid = GridSpec::new(n_points, span, center.unwrap_or(pump.mu())).map_err(err)?;
        let jsa = build_jsa(&pump, &crystal, &grid, pmf_kind(pmf)?).map_err(err)?;
        Ok(PyJsa { jsa })
    }

    /// Builds the JSA described by a run config file.
    #[staticmethod]
    fn from_config(path: PathBuf) -> PyResult<Self> {
        let cfg = RunConfig::load(&path).map_err(err)?;
        let r = cfg.resolve().map_err(err)?;
        let jsa = build_jsa(&r.pump, &r.crystal, &r.grid, r.pmf).map_err(err)?;
        Ok(PyJsa { jsa })
    }

    #[getter]
    fn shape(&self) -> (usize, usize) {
        self.jsa.amplitude.shape()
    }

    #[getter]
    fn idler(&self) -> Vec<f64> {
        self.jsa.idler.samples.clone()
    }

    #[getter]
    fn signal(&self) -> Vec<f64> {
        self.jsa.signal.samples.clone()
    }

    /// Rows are idler samples; entries are (re, im).
    fn amplitude(&self) -> Vec<Vec<(f64, f64)>> {
        let a = &self.jsa.amplitude;
        (0..a.nrows())
            .map(|i| (0..a.ncols()).map(|j| (a[(i, j)].re, a[(i, j)].im)).collect())
            .collect()
    }

    fn norm_sqr(&self) -> f64 {
        self.jsa.norm_sqr()
    }

    #[pyo3(signature = (cutoff = 0.0))]
    fn schmidt(&self, cutoff: f64) -> PyResult<PySchmidt> {
        let d = schmidt_decompose(&self.jsa, cutoff).map_err(err)?;
        Ok(PySchmidt {
            d: Arc::new(d),
            cache: Arc::new(DesignCache::new()),
        })
    }
}

#[pyclass(name = "HeraldReport", frozen, get_all)]
struct PyReport {
    n: u8,
    probability: f64,
    g2: Option<f64>,
    purity: Option<f64>,
    fidelity: Option<f64>,
}

impl From<HeraldReport> for PyReport {
    fn from(r: HeraldReport) -> Self {
        PyReport {
            n: r.n,
            probability: r.probability,
            g2: r.g2(),
            purity: r.purity(),
            fidelity: r.fidelity(),
        }
    }
}

#[pymethods]
impl PyReport {
    fn __repr__(&self) -> String {
        format!(
            "HeraldReport(n={}, probability={}, g2={}, purity={}, fidelity={})",
            self.n,
            self.probability,
            opt(self.g2),
            opt(self.purity),
            opt(self.fidelity)
        )
    }
}

#[pyclass(name = "Solution", frozen, get_all)]
struct PySolution {
    outcome: &'static str,
    chi: Option<f64>,
    fidelity: Option<f64>,
    iterations: Option<usize>,
}

#[pyclass(name = "SweepRow", frozen, get_all)]
struct PySweepRow {
    filter: &'static str,
    sigma_f: Option<f64>,
    chi_star: Option<f64>,
    probability: Option<f64>,
    fidelity: Option<f64>,
    entropy: f64,
    flags: Vec<&'static str>,
}

impl From<&SweepRow> for PySweepRow {
    fn from(r: &SweepRow) -> Self {
        let f = &r.flags;
        let flags = [
            (f.unreachable, "unreachable"),
            (f.chi_independent, "chi_independent"),
            (f.saturated, "saturated"),
            (f.non_monotone, "non_monotone"),
            (f.not_converged, "not_converged"),
        ]
        .into_iter()
        .filter_map(|(on, name)| on.then_some(name))
        .collect();
        PySweepRow {
            filter: r.filter,
            sigma_f: r.sigma_f,
            chi_star: r.chi_star,
            probability: r.probability,
            fidelity: r.fidelity,
            entropy: r.entropy,
            flags,
        }
    }
}

#[pymethods]
impl PySweepRow {
    fn __repr__(&self) -> String {
        format!(
            "SweepRow(filter={}, sigma_f={}, chi_star={}, probability={}, fidelity={})",
            self.filter,
            opt(self.sigma_f),
            opt(self.chi_star),
            opt(self.probability),
            opt(self.fidelity)
        )
    }
}

/// Schmidt decomposition of a JSA.
#[pyclass(name = "Schmidt", frozen)]
struct PySchmidt {
    d: Arc<SchmidtDecomposition>,
    cache: Arc<DesignCache>,
}

impl PySchmidt {
    fn model(&self, filter: Option<&PyFilter>) -> PyResult<HeraldModel> {
        let spec = filter.map(|f| f.spec.clone()).unwrap_or_else(|| FilterSpec::none(1.0));
        HeraldModel::new(&self.d, &spec).map_err(err)
    }
}

#[pymethods]
impl PySchmidt {
    #[getter]
    fn b(&self) -> Vec<f64> {
        self.d.b.clone()
    }

    #[getter]
    fn entropy(&self) -> f64 {
        self.d.entropy()
    }

    #[getter]
    fn retained_weight(&self) -> f64 {
        self.d.retained_weight()
    }

    fn __len__(&self) -> usize {
        self.d.len()
    }

    #[pyo3(signature = (chi, n = 1, filter = None))]
    fn herald(&self, chi: f64, n: u8, filter: Option<&PyFilter>) -> PyResult<PyReport> {
        Ok(self.model(filter)?.report(chi, n).map_err(err)?.into())
    }

    /// Largest χ whose fidelity still meets `target`.
    #[pyo3(signature = (target, n = 1, filter = None, chi_max = None))]
    fn solve(&self, target: f64, n: u8, filter: Option<&PyFilter>, chi_max: Option<f64>) -> PyResult<PySolution> {
        let chi_max = chi_max.unwrap_or_else(|| default_chi_max(n));
        let out = solve_chi(&self.model(filter)?, n, target, chi_max).map_err(err)?;
        let chi = out.chi_star(chi_max);
        Ok(match out {
            SolveOutcome::Solved {
                fidelity, iterations, ..
            } => PySolution {
                outcome: "solved",
                chi,
                fidelity: Some(fidelity),
                iterations: Some(iterations),
            },
            SolveOutcome::Saturated { fidelity, .. } => PySolution {
                outcome: "saturated",
                chi,
                fidelity: Some(fidelity),
                iterations: None,
            },
            SolveOutcome::ChiIndependent { fidelity, .. } => PySolution {
                outcome: "chi_independent",
                chi,
                fidelity: Some(fidelity),
                iterations: None,
            },
            SolveOutcome::Unreachable { fidelity_at_zero } => PySolution {
                outcome: "unreachable",
                chi,
                fidelity: fidelity_at_zero,
                iterations: None,
            },
        })
    }

    #[pyo3(signature = (target, sigma_f, eta = 1.0, n = 1, mu_f = None, include_delta = true, include_none = true, chi_max = None))]
    #[allow(clippy::too_many_arguments)]
    fn sweep(
        &self,
        target: f64,
        sigma_f: Vec<f64>,
        eta: f64,
        n: u8,
        mu_f: Option<f64>,
        include_delta: bool,
        include_none: bool,
        chi_max: Option<f64>,
    ) -> PyResult<Vec<PySweepRow>> {
        let mut filters: Vec<SweepFilter> = sigma_f.into_iter().map(SweepFilter::Gaussian).collect();
        if include_delta {
            filters.push(SweepFilter::Delta);
        }
        if include_none {
            filters.push(SweepFilter::None);
        }
        let req = SweepRequest {
            key: "py".into(),
            decomposition: self.d.clone(),
            n,
            eta,
            mu_f: mu_f.unwrap_or(self.d.idler.center),
            filters,
            target,
            chi_max: chi_max.unwrap_or_else(|| default_chi_max(n)),
        };
        let rows = fockherald::design::sweep_filter_width(&req, &self.cache).map_err(err)?;
        Ok(rows.iter().map(PySweepRow::from).collect())
    }
}

/// Best-probability row of a sweep, or None when no row meets the target.
#[pyfunction]
fn best(rows: Vec<Bound<'_, PySweepRow>>) -> Option<Bound<'_, PySweepRow>> {
    rows.into_iter()
        .filter(|r| r.get().probability.is_some())
        .max_by(|a, b| {
            a.get()
                .probability
                .unwrap_or(0.0)
                .total_cmp(&b.get().probability.unwrap_or(0.0))
        })
}

#[pyfunction]
fn pump_sigma(center_nm: f64, fwhm_nm: f64) -> PyResult<f64> {
    fwhm_nm_to_sigma(center_nm, fwhm_nm).map_err(err)
}

/// Runs the brute-force cross-check; returns (passed, total, worst relative error).
#[pyfunction]
#[pyo3(signature = (seed = 20_260_101, instances = 60))]
fn oracle_check(py: Python<'_>, seed: u64, instances: usize) -> PyResult<(usize, usize, f64)> {
    let results = py.detach(|| run_suite(seed, instances)).map_err(err)?;
    let passed = results.iter().filter(|r| r.pass).count();
    let worst = results
        .iter()
        .flat_map(|r| r.metrics.iter().map(|m| m.rel_err))
        .fold(0.0, f64::max);
    Ok((passed, results.len(), worst))
}

#[pymodule]
fn fockherald_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    m.add_class::<PyFilter>()?;
    m.add_class::<PyJsa>()?;
    m.add_class::<PySchmidt>()?;
    m.add_class::<PyReport>()?;
    m.add_class::<PySolution>()?;
    m.add_class::<PySweepRow>()?;
    m.add_function(wrap_pyfunction!(best, m)?)?;
    m.add_function(wrap_pyfunction!(pump_sigma, m)?)?;
    m.add_function(wrap_pyfunction!(oracle_check, m)?)?;
    Ok(())
}
