//! Python bindings for `bautin-core`.
//!
//! Structured results (H1 reports, Bautin searches, cycle findings, full
//! reports) cross the boundary as canonical JSON and come out as plain
//! Python dicts, so they carry the same 15-digit rounding as the CLI.

use bautin_core::ddesim::{detect_cycles, DetectOptions, HistoryFn, Integrator, Projector};
use bautin_core::normalform::{
    beta_map, check_h2, classify_region, default_fd_step, find_bautin, h1_report, hopf_point, radial_amplitudes,
    solve_nu, BetaCoords, HopfPoint, NuCoords, PipelineOptions, REGION_TOL,
};
use bautin_core::report::{run, to_canonical_json, AnalyzeRequest, Mode, SimOptions, DEFAULT_MAX_ITER};
use bautin_core::spectrum::{find_roots_with, leading_pair_of, Characteristic, ScanWindow};
use bautin_core::{fixtures, parse_system, DelaySystem, Error, ParamPoint};
use num_complex::Complex64;
use pyo3::create_exception;
use pyo3::exceptions::PyException;
use pyo3::prelude::*;
use serde::Serialize;

create_exception!(bautin_dde, BautinError, PyException);
create_exception!(bautin_dde, ConfigError, BautinError);
create_exception!(bautin_dde, NumericalError, BautinError);

fn to_py_err(e: Error) -> PyErr {
    match e {
        Error::Config(_) | Error::StepTooLarge { .. } => ConfigError::new_err(e.to_string()),
        e => NumericalError::new_err((e.stage(), e.to_string())),
    }
}

fn to_dict<T: Serialize>(py: Python<'_>, value: &T) -> PyResult<Py<PyAny>> {
    let text = to_canonical_json(value, false);
    Ok(py.import("json")?.call_method1("loads", (text,))?.unbind())
}

fn point((a1, a2): (f64, f64)) -> PyResult<ParamPoint> {
    let p = ParamPoint::new(a1, a2);
    if !p.is_finite() {
        return Err(ConfigError::new_err("alpha must be finite"));
    }
    Ok(p)
}

fn pipeline(r: f64, scan_re: Option<f64>, scan_im: Option<f64>, h1_delta: Option<f64>) -> PipelineOptions {
    let window = (scan_re.is_some() || scan_im.is_some()).then(|| {
        let d = ScanWindow::default_for(r);
        ScanWindow { sigma_max: scan_re.unwrap_or(d.sigma_max), omega_max: scan_im.unwrap_or(d.omega_max) }
    });
    PipelineOptions { window, h1_delta }
}

/// A delay system `x' = A(α)x + B(α)x(t−r) + f(x, x(t−r); α)`.
#[pyclass(frozen, name = "System", module = "bautin_dde")]
struct PySystem {
    inner: DelaySystem,
}

#[pymethods]
impl PySystem {
    /// Parses a JSON system configuration.
    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        Ok(Self { inner: parse_system(text).map_err(to_py_err)? })
    }

    #[staticmethod]
    fn load(path: std::path::PathBuf) -> PyResult<Self> {
        let text = std::fs::read_to_string(&path)
            .map_err(|e| ConfigError::new_err(format!("cannot read {}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    #[staticmethod]
    fn wright() -> Self {
        Self { inner: fixtures::wright() }
    }

    #[staticmethod]
    fn hayes(a: f64) -> Self {
        Self { inner: fixtures::hayes(a) }
    }

    #[staticmethod]
    #[pyo3(signature = (b = 1.0, c2 = 1.0))]
    fn golden(b: f64, c2: f64) -> Self {
        Self { inner: fixtures::golden(b, c2) }
    }

    #[staticmethod]
    #[pyo3(signature = (q = 0.5, c = 1.0))]
    fn cubic_quintic(q: f64, c: f64) -> Self {
        Self { inner: fixtures::cubic_quintic(q, c) }
    }

    #[getter]
    fn n(&self) -> usize {
        self.inner.n()
    }

    #[getter]
    fn delay(&self) -> f64 {
        self.inner.delay()
    }

    fn to_json(&self) -> String {
        self.inner.to_json()
    }

    /// `det Δ(λ)` at `alpha`.
    fn char_det(&self, alpha: (f64, f64), lam: Complex64) -> PyResult<Complex64> {
        Ok(Characteristic::new(&self.inner, point(alpha)?).det(lam))
    }

    /// Characteristic roots in the scan window (conjugates included) as
    /// `(λ, multiplicity)` pairs, rightmost first.
    #[pyo3(signature = (alpha, scan_re = None, scan_im = None))]
    fn roots(
        &self,
        py: Python<'_>,
        alpha: (f64, f64),
        scan_re: Option<f64>,
        scan_im: Option<f64>,
    ) -> PyResult<Vec<(Complex64, usize)>> {
        let alpha = point(alpha)?;
        let window = pipeline(self.inner.delay(), scan_re, scan_im, None).window(self.inner.delay());
        let mut roots = py
            .detach(|| find_roots_with(&Characteristic::new(&self.inner, alpha), window))
            .map_err(to_py_err)?;
        roots.sort_by(|a, b| b.lambda.re.total_cmp(&a.lambda.re).then(b.lambda.im.total_cmp(&a.lambda.im)));
        Ok(roots.into_iter().map(|c| (c.lambda, c.multiplicity)).collect())
    }

    #[pyo3(signature = (alpha, h1_delta = None, scan_re = None, scan_im = None))]
    fn check_h1(
        &self,
        py: Python<'_>,
        alpha: (f64, f64),
        h1_delta: Option<f64>,
        scan_re: Option<f64>,
        scan_im: Option<f64>,
    ) -> PyResult<Py<PyAny>> {
        let alpha = point(alpha)?;
        let opts = pipeline(self.inner.delay(), scan_re, scan_im, h1_delta);
        let rep = py.detach(|| h1_report(&self.inner, alpha, &opts)).map_err(to_py_err)?;
        to_dict(py, &rep)
    }

    /// Reduction at `alpha` up to `order` (5 gives `l₂`). Raises
    /// `NumericalError` when H1 fails.
    #[pyo3(signature = (alpha, order = 5, h1_delta = None, scan_re = None, scan_im = None))]
    fn hopf_point(
        &self,
        py: Python<'_>,
        alpha: (f64, f64),
        order: usize,
        h1_delta: Option<f64>,
        scan_re: Option<f64>,
        scan_im: Option<f64>,
    ) -> PyResult<PyHopfPoint> {
        let alpha = point(alpha)?;
        let opts = pipeline(self.inner.delay(), scan_re, scan_im, h1_delta);
        let hp = py.detach(|| hopf_point(&self.inner, alpha, &opts, order)).map_err(to_py_err)?;
        Ok(PyHopfPoint { inner: hp })
    }

    /// Damped Newton search for `μ = l₁ = 0` starting at `guess`.
    #[pyo3(signature = (guess, max_iter = DEFAULT_MAX_ITER))]
    fn find_bautin(&self, py: Python<'_>, guess: (f64, f64), max_iter: usize) -> PyResult<Py<PyAny>> {
        let guess = point(guess)?;
        let found = py
            .detach(|| find_bautin(&self.inner, guess, max_iter, &PipelineOptions::default()))
            .map_err(to_py_err)?;
        to_dict(py, &found)
    }

    /// Jacobian of `α ↦ ν` at `alpha0` by central differences.
    #[pyo3(signature = (alpha0, step = None))]
    fn check_h2(&self, py: Python<'_>, alpha0: (f64, f64), step: Option<f64>) -> PyResult<Py<PyAny>> {
        let alpha0 = point(alpha0)?;
        let h = step.unwrap_or_else(|| default_fd_step(alpha0));
        let rep = py
            .detach(|| check_h2(&self.inner, alpha0, h, &PipelineOptions::default()))
            .map_err(to_py_err)?;
        to_dict(py, &rep)
    }

    /// Parameter point where `ν(α) = nu`, by Newton from `guess`.
    #[pyo3(signature = (nu, guess, max_iter = DEFAULT_MAX_ITER))]
    fn solve_nu(&self, py: Python<'_>, nu: (f64, f64), guess: (f64, f64), max_iter: usize) -> PyResult<(f64, f64)> {
        let target = NuCoords { nu1: nu.0, nu2: nu.1 };
        let guess = point(guess)?;
        let a = py
            .detach(|| solve_nu(&self.inner, target, guess, max_iter, &PipelineOptions::default()))
            .map_err(to_py_err)?;
        Ok((a.alpha1, a.alpha2))
    }

    /// Integrates from an eigenplane history of amplitude `amplitude`.
    /// Returns `(t, x, z)`: times, states (one list per time) and the
    /// center-space coordinate.
    #[pyo3(signature = (alpha, t_end, h = None, amplitude = 0.1))]
    #[allow(clippy::type_complexity)]
    fn simulate(
        &self,
        py: Python<'_>,
        alpha: (f64, f64),
        t_end: f64,
        h: Option<f64>,
        amplitude: f64,
    ) -> PyResult<(Vec<f64>, Vec<Vec<f64>>, Vec<Complex64>)> {
        let alpha = point(alpha)?;
        let sys = &self.inner;
        let r = sys.delay();
        py.detach(|| {
            let window = ScanWindow::default_for(r);
            let lead = leading_pair_of(&find_roots_with(&Characteristic::new(sys, alpha), window)?)?;
            let basis = bautin_core::eigenbasis::EigenBasis::compute(sys, alpha, lead.lambda)?;
            let mut it = Integrator::new(sys, alpha, HistoryFn::eigenplane(&basis, amplitude), h.unwrap_or(r / 100.0))?;
            let steps = (t_end / it.trajectory().step() - 1e-9).ceil().max(0.0) as usize;
            for _ in 0..steps {
                if !it.advance() {
                    break;
                }
            }
            let traj = it.into_trajectory();
            let proj = Projector::new(sys, alpha, &basis);
            let t = (0..traj.len()).map(|i| traj.time(i)).collect();
            let x = (0..traj.len()).map(|i| traj.state(i).to_vec()).collect();
            let z = (0..traj.len()).map(|i| proj.at_grid(&traj, i)).collect();
            Ok((t, x, z))
        })
        .map_err(to_py_err)
    }

    /// Simulation-based cycle search at `alpha` with default options
    /// derived from the predicted amplitudes.
    fn detect_cycles(&self, py: Python<'_>, alpha: (f64, f64)) -> PyResult<Py<PyAny>> {
        let alpha = point(alpha)?;
        let sys = &self.inner;
        let findings = py
            .detach(|| {
                let hp = hopf_point(sys, alpha, &PipelineOptions::default(), 5)?;
                let predicted = match hp.l2 {
                    Some(l2) => radial_amplitudes(hp.mu() / hp.omega(), hp.l1, l2),
                    None => Vec::new(),
                };
                let opts = DetectOptions::defaults(sys.delay(), hp.mu(), &predicted);
                detect_cycles(sys, alpha, hp.basis(), &opts)
            })
            .map_err(to_py_err)?;
        to_dict(py, &findings)
    }

    /// Full report for `mode` (`spectrum`, `analyze`, `bautin-search`,
    /// `verify`), as the CLI would print it.
    #[pyo3(signature = (alpha, mode = "analyze", h1_delta = None, fd_step = None, sim_t = None, sim_h = None, max_iter = DEFAULT_MAX_ITER))]
    #[allow(clippy::too_many_arguments)]
    fn report(
        &self,
        py: Python<'_>,
        alpha: (f64, f64),
        mode: &str,
        h1_delta: Option<f64>,
        fd_step: Option<f64>,
        sim_t: Option<f64>,
        sim_h: Option<f64>,
        max_iter: usize,
    ) -> PyResult<Py<PyAny>> {
        let mode = match mode {
            "spectrum" => Mode::Spectrum,
            "analyze" => Mode::Analyze,
            "bautin-search" => Mode::BautinSearch,
            "verify" => Mode::Verify,
            other => return Err(ConfigError::new_err(format!("unknown report mode {other:?}"))),
        };
        let mut req = AnalyzeRequest::new(mode, self.inner.clone(), point(alpha)?);
        req.pipeline.h1_delta = h1_delta;
        req.fd_step = fd_step;
        req.sim = SimOptions { t: sim_t, h: sim_h, amplitude: None };
        req.max_iter = max_iter;
        let rep = py.detach(|| run(&req)).map_err(to_py_err)?;
        to_dict(py, &rep)
    }

    fn __repr__(&self) -> String {
        format!("System(n={}, r={})", self.inner.n(), self.inner.delay())
    }
}

/// Critical eigenvalue, eigenbasis and reduced coefficients at one point.
#[pyclass(frozen, name = "HopfPoint", module = "bautin_dde")]
struct PyHopfPoint {
    inner: HopfPoint,
}

#[pymethods]
impl PyHopfPoint {
    #[getter]
    fn alpha(&self) -> (f64, f64) {
        (self.inner.alpha.alpha1, self.inner.alpha.alpha2)
    }

    #[getter]
    fn lambda1(&self) -> Complex64 {
        self.inner.lambda1
    }

    #[getter]
    fn mu(&self) -> f64 {
        self.inner.mu()
    }

    #[getter]
    fn omega(&self) -> f64 {
        self.inner.omega()
    }

    #[getter]
    fn l1(&self) -> f64 {
        self.inner.l1
    }

    #[getter]
    fn l2(&self) -> Option<f64> {
        self.inner.l2
    }

    /// `(ν₁, ν₂) = (μ/ω, l₁)`.
    #[getter]
    fn nu(&self) -> (f64, f64) {
        let nu = self.inner.nu();
        (nu.nu1, nu.nu2)
    }

    /// Right eigenvector `φ₁(0)`.
    #[getter]
    fn u(&self) -> Vec<Complex64> {
        self.inner.basis().u.iter().copied().collect()
    }

    /// Normalized adjoint row `ψ₁(0)`.
    #[getter]
    fn v(&self) -> Vec<Complex64> {
        self.inner.basis().v.iter().copied().collect()
    }

    #[getter]
    fn order(&self) -> usize {
        self.inner.expansion.max_order
    }

    /// Reduced-equation coefficient `g_jk`.
    fn g(&self, j: usize, k: usize) -> PyResult<Complex64> {
        if j + k > self.inner.expansion.max_order {
            return Err(ConfigError::new_err(format!(
                "g{j}{k} is beyond the expansion order {}",
                self.inner.expansion.max_order
            )));
        }
        Ok(*self.inner.expansion.g.get(j, k))
    }

    /// All `g_jk` with `j + k ≥ 2`, keyed by `(j, k)`.
    fn coefficients(&self) -> Vec<((usize, usize), Complex64)> {
        self.inner
            .expansion
            .g
            .iter()
            .filter(|(j, k, _)| j + k >= 2)
            .map(|(j, k, c)| ((j, k), *c))
            .collect()
    }

    fn __repr__(&self) -> String {
        format!(
            "HopfPoint(alpha=({}, {}), lambda1={}, l1={}, l2={:?})",
            self.inner.alpha.alpha1, self.inner.alpha.alpha2, self.inner.lambda1, self.inner.l1, self.inner.l2
        )
    }
}

/// `(β₁, β₂, s)` from `ν` and `l₂(α)`.
#[pyfunction]
fn beta(nu: (f64, f64), l2: f64) -> PyResult<(f64, f64, i8)> {
    let b = beta_map(NuCoords { nu1: nu.0, nu2: nu.1 }, l2).map_err(to_py_err)?;
    Ok((b.beta1, b.beta2, b.s))
}

/// Region name and, where cycles exist, their amplitudes `(ρ₁, ρ₂)`.
#[pyfunction]
#[pyo3(signature = (beta, tol = REGION_TOL))]
fn classify(beta: (f64, f64, i8), tol: f64) -> PyResult<(String, Option<(f64, f64)>)> {
    let b = BetaCoords { beta1: beta.0, beta2: beta.1, s: beta.2 };
    let c = classify_region(b, tol).map_err(to_py_err)?;
    Ok((format!("{:?}", c.region), c.amplitudes.map(|a| (a.rho1, a.rho2))))
}

/// Positive roots of `ν₁ + l₁ρ² + l₂ρ⁴`.
#[pyfunction]
fn radial_roots(nu1: f64, l1: f64, l2: f64) -> Vec<f64> {
    radial_amplitudes(nu1, l1, l2)
}

#[pymodule]
fn bautin_dde(m: &Bound<'_, PyModule>) -> PyResult<()> {
    let py = m.py();
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    m.add("BautinError", py.get_type::<BautinError>())?;
    m.add("ConfigError", py.get_type::<ConfigError>())?;
    m.add("NumericalError", py.get_type::<NumericalError>())?;
    m.add_class::<PySystem>()?;
    m.add_class::<PyHopfPoint>()?;
    m.add_function(wrap_pyfunction!(beta, m)?)?;
    m.add_function(wrap_pyfunction!(classify, m)?)?;
    m.add_function(wrap_pyfunction!(radial_roots, m)?)?;
    Ok(())
}
