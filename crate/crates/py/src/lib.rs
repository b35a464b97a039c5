//! Python bindings: lattices, disorder ensembles, resolvents, dynamics,
//! certificates and the batch runner.

use dynloc::disorder::{DisorderKind, DisorderSpec};
use dynloc::dynamics::{
    cesaro, disorder_average, second_moment_trace, uniform_time_grid, InitialState, Propagation,
};
use dynloc::ensemble::par_map_indexed;
use dynloc::green::{gre_identity_residual, BoxGreen, EpsilonProbe, GreenQuery};
use dynloc::lattice::{LatticeBox, LatticeSpec, Site};
use dynloc::msa::{deterministic_certificate, probabilistic_certificate, remark23_bound, CertificateParams};
use dynloc::operator::{diagonalize_with_cap, eigenvalues, FilterSpec, DEFAULT_MATRIX_CAP};
use dynloc_cli::config::RunConfig;
use num_complex::Complex64;
use pyo3::create_exception;
use pyo3::exceptions::PyException;
use pyo3::prelude::*;
use pyo3::types::PyDict;
use serde::Serialize;

create_exception!(dynloc, DynlocError, PyException);

fn err(e: dynloc::Error) -> PyErr {
    DynlocError::new_err(e.to_string())
}

fn to_py<'py, T: Serialize>(py: Python<'py>, value: &T) -> PyResult<Bound<'py, PyAny>> {
    Ok(pythonize::pythonize(py, value)?)
}

fn site(coords: &[i64]) -> PyResult<Site> {
    if coords.is_empty() || coords.len() > 3 {
        return Err(DynlocError::new_err("a site has 1 to 3 coordinates"));
    }
    let mut s: Site = [0; 3];
    s[..coords.len()].copy_from_slice(coords);
    Ok(s)
}

/// Centered lattice window of odd extent.
#[pyclass(module = "dynloc", frozen, skip_from_py_object)]
#[derive(Clone)]
struct Lattice {
    inner: LatticeSpec,
}

#[pymethods]
impl Lattice {
    #[new]
    fn new(dimension: usize, extent: usize) -> PyResult<Self> {
        Ok(Self {
            inner: LatticeSpec::new(dimension, extent).map_err(err)?,
        })
    }

    #[getter]
    fn dimension(&self) -> usize {
        self.inner.dimension()
    }

    #[getter]
    fn extent(&self) -> usize {
        self.inner.extent()
    }

    #[getter]
    fn num_sites(&self) -> usize {
        self.inner.num_sites()
    }

    fn index_of(&self, coords: Vec<i64>) -> PyResult<Option<usize>> {
        Ok(self.inner.index_of(&site(&coords)?))
    }

    fn site_of(&self, index: usize) -> Vec<i64> {
        self.inner.site_of(index)[..self.inner.dimension()].to_vec()
    }

    fn __repr__(&self) -> String {
        format!("Lattice(dimension={}, extent={})", self.inner.dimension(), self.inner.extent())
    }
}

/// Random operators `H_ω = −Δ + V_ω` indexed by realization.
#[pyclass(module = "dynloc", frozen)]
struct Ensemble {
    inner: dynloc::ensemble::Ensemble,
}

#[pymethods]
impl Ensemble {
    #[new]
    #[pyo3(signature = (lattice, kind = "iid-uniform", half_width = 4.0, seed = 0, samples = 1, radius = 0))]
    fn new(lattice: &Lattice, kind: &str, half_width: f64, seed: u64, samples: u64, radius: u32) -> PyResult<Self> {
        let kind = DisorderKind::parse(kind).map_err(err)?;
        if kind == DisorderKind::IidDensity {
            return Err(DynlocError::new_err("tabulated densities are configured through run()"));
        }
        let spec = DisorderSpec {
            kind,
            half_width: if kind == DisorderKind::None { 0.0 } else { half_width },
            radius,
            density: None,
            seed,
            samples,
        };
        Ok(Self {
            inner: dynloc::ensemble::Ensemble::new(lattice.inner.clone(), spec).map_err(err)?,
        })
    }

    #[getter]
    fn samples(&self) -> u64 {
        self.inner.samples()
    }

    #[getter]
    fn lattice(&self) -> Lattice {
        Lattice {
            inner: self.inner.lattice.clone(),
        }
    }

    /// On-site potential of one realization in lattice index order.
    fn potential(&self, index: u64) -> PyResult<Vec<f64>> {
        Ok(self.inner.field(index).map_err(err)?.values)
    }

    /// Sorted spectrum of one realization.
    fn eigenvalues(&self, index: u64) -> PyResult<Vec<f64>> {
        let op = self.inner.operator(index).map_err(err)?;
        Ok(eigenvalues(&op))
    }

    /// `G(target, source; E + iε)`, optionally for the box `Λ_radius(center)`.
    #[pyo3(signature = (index, energy, epsilon, source, target, center = None, radius = None))]
    #[allow(clippy::too_many_arguments)]
    fn green(
        &self,
        index: u64,
        energy: f64,
        epsilon: f64,
        source: Vec<i64>,
        target: Vec<i64>,
        center: Option<Vec<i64>>,
        radius: Option<f64>,
    ) -> PyResult<Complex64> {
        let restriction = match (center, radius) {
            (Some(c), Some(r)) => Some(LatticeBox::new(site(&c)?, r)),
            (None, None) => None,
            _ => return Err(DynlocError::new_err("center and radius go together")),
        };
        let q = GreenQuery {
            energy,
            epsilon,
            source: site(&source)?,
            target: site(&target)?,
            restriction,
        };
        let op = self.inner.operator(index).map_err(err)?;
        q.evaluate(&op).map_err(err)
    }

    /// Residual of the geometric resolvent identity for `Λ_radius(center)`.
    fn gre_residual<'py>(
        &self,
        py: Python<'py>,
        index: u64,
        center: Vec<i64>,
        radius: f64,
        source: Vec<i64>,
        energy: f64,
        epsilon: f64,
    ) -> PyResult<Bound<'py, PyAny>> {
        let op = self.inner.operator(index).map_err(err)?;
        let bx = LatticeBox::new(site(&center)?, radius);
        let rep = gre_identity_residual(&op, &bx, &site(&source)?, energy, epsilon).map_err(err)?;
        to_py(py, &rep)
    }

    /// `(ρ, E, L, q)`-regularity verdict of one realization.
    #[pyo3(signature = (index, center, radius, energy, threshold, epsilon_min = 1e-6, per_decade = 8))]
    #[allow(clippy::too_many_arguments)]
    fn regularity<'py>(
        &self,
        py: Python<'py>,
        index: u64,
        center: Vec<i64>,
        radius: f64,
        energy: f64,
        threshold: f64,
        epsilon_min: f64,
        per_decade: usize,
    ) -> PyResult<Bound<'py, PyAny>> {
        let op = self.inner.operator(index).map_err(err)?;
        let bg = BoxGreen::new(&op, &LatticeBox::new(site(&center)?, radius)).map_err(err)?;
        let probe = EpsilonProbe {
            epsilon_min,
            per_decade,
        };
        to_py(py, &bg.regularity(energy, threshold, &probe))
    }

    /// Disorder-averaged second moment and Cesàro means over all samples.
    ///
    /// `filter` is `(lower, upper, margin, ramp)`; without it the initial
    /// state is `δ_site`.
    #[pyo3(signature = (t_max, dt, cesaro_times, site = None, filter = None, workers = 1))]
    #[allow(clippy::too_many_arguments)]
    fn dynamics<'py>(
        &self,
        py: Python<'py>,
        t_max: f64,
        dt: f64,
        cesaro_times: Vec<f64>,
        site: Option<Vec<i64>>,
        filter: Option<(f64, f64, f64, f64)>,
        workers: usize,
    ) -> PyResult<Bound<'py, PyAny>> {
        let s = match site {
            Some(c) => self::site(&c)?,
            None => [0; 3],
        };
        let init = match filter {
            Some((a, b, m, r)) => InitialState::FilteredDelta {
                site: s,
                filter: FilterSpec::new(a, b, m, r).map_err(err)?,
            },
            None => InitialState::Delta(s),
        };
        let times = uniform_time_grid(t_max, dt).map_err(err)?;
        let label = init.label();
        let ens = &self.inner;
        let avg = py
            .detach(|| {
                let traces = par_map_indexed(workers.max(1), ens.samples() as usize, |i| {
                    let op = ens.operator(i as u64)?;
                    let dec = diagonalize_with_cap(&op, DEFAULT_MATRIX_CAP)?;
                    let psi = init.prepare(&op, Some(&dec), 1e-12)?;
                    let trace = second_moment_trace(&op, Propagation::Spectral(&dec), &psi, &times, &label, None)?;
                    cesaro(&trace, &cesaro_times)
                })?;
                disorder_average(&traces)
            })
            .map_err(err)?;
        to_py(py, &avg)
    }

    fn __repr__(&self) -> String {
        let d = &self.inner.disorder;
        format!(
            "Ensemble(dimension={}, extent={}, kind='{}', half_width={}, samples={})",
            self.inner.lattice.dimension(),
            self.inner.lattice.extent(),
            d.kind.label(),
            d.half_width,
            d.samples
        )
    }
}

/// Deterministic and probabilistic certificates for one parameter set.
#[pyfunction]
#[pyo3(signature = (alpha, m, w, s, n, d, k0, theta, p, ell, l0, c_w = 1.0, interval_len = 1.0, c_nsd = 1.0, c_dn = 1.0, c_check = 1.0))]
#[allow(clippy::too_many_arguments)]
fn certificate<'py>(
    py: Python<'py>,
    alpha: f64,
    m: f64,
    w: f64,
    s: u32,
    n: u32,
    d: usize,
    k0: u32,
    theta: f64,
    p: f64,
    ell: f64,
    l0: f64,
    c_w: f64,
    interval_len: f64,
    c_nsd: f64,
    c_dn: f64,
    c_check: f64,
) -> PyResult<Bound<'py, PyDict>> {
    let params = CertificateParams {
        alpha,
        m,
        w,
        s,
        n,
        d,
        k0,
        theta,
        p,
        c_w,
        interval_len,
        c_nsd,
        c_dn,
        c_check,
    };
    let out = PyDict::new(py);
    out.set_item("deterministic", to_py(py, &deterministic_certificate(&params, ell).map_err(err)?)?)?;
    out.set_item("probabilistic", to_py(py, &probabilistic_certificate(&params, l0).map_err(err)?)?)?;
    Ok(out)
}

/// Exponent bound from the summability remark; `None` when its hypothesis fails.
#[pyfunction(name = "remark23_bound")]
fn remark_bound(alpha: f64, d: usize, n: f64) -> Option<f64> {
    remark23_bound(alpha, d, n).bound
}

/// Two-sided Clopper–Pearson interval for `k` successes out of `n`.
#[pyfunction]
#[pyo3(signature = (k, n, confidence = 0.95))]
fn clopper_pearson(k: u64, n: u64, confidence: f64) -> PyResult<(f64, f64)> {
    if n == 0 || k > n {
        return Err(DynlocError::new_err("need 0 <= k <= n and n > 0"));
    }
    Ok(dynloc::stats::clopper_pearson(k, n, confidence))
}

/// Runs a batch subcommand. `overrides` maps `"section.key"` to values.
#[pyfunction]
#[pyo3(signature = (subcommand, config = None, overrides = None))]
fn run<'py>(
    py: Python<'py>,
    subcommand: &str,
    config: Option<std::path::PathBuf>,
    overrides: Option<Bound<'py, PyDict>>,
) -> PyResult<Bound<'py, PyDict>> {
    let mut cfg = match config {
        Some(p) => RunConfig::load(&p).map_err(err)?,
        None => RunConfig::default(),
    };
    if let Some(o) = overrides {
        for (k, v) in o.iter() {
            let key: String = k.extract()?;
            let (section, name) = key
                .split_once('.')
                .ok_or_else(|| DynlocError::new_err(format!("override '{key}' is not section.key")))?;
            cfg.set(section, name, v.str()?.to_string()).map_err(err)?;
        }
    }
    let outcome = py.detach(|| dynloc_cli::run(subcommand, &cfg)).map_err(err)?;
    let out = PyDict::new(py);
    out.set_item("manifest", to_py(py, &outcome.manifest)?)?;
    out.set_item("verdicts", to_py(py, &outcome.verdicts)?)?;
    out.set_item("passed", outcome.failed().is_empty())?;
    Ok(out)
}

#[pymodule]
#[pyo3(name = "dynloc")]
fn dynloc_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<Lattice>()?;
    m.add_class::<Ensemble>()?;
    m.add_function(wrap_pyfunction!(certificate, m)?)?;
    m.add_function(wrap_pyfunction!(remark_bound, m)?)?;
    m.add_function(wrap_pyfunction!(clopper_pearson, m)?)?;
    m.add_function(wrap_pyfunction!(run, m)?)?;
    m.add("DynlocError", m.py().get_type::<DynlocError>())?;
    Ok(())
}
