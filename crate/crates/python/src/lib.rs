//! Python bindings for the modal acoustics library.

use std::collections::BTreeMap;
use std::path::PathBuf;

use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;

use acousticbc::audit::{audit_conservation, audit_energy};
use acousticbc::evolve::{evolve, IntegratorConfig, TrajectoryRecord};
use acousticbc::presets::compatible_potential;
use acousticbc::rng::SplitMix64;
use acousticbc::runner::{execute, run_file, Command, RunOptions};
use acousticbc::scenario::Scenario;
use acousticbc::transforms::{map_potential_to_eulerian, map_potential_to_lagrangian};
use acousticbc::{
    assemble_mode_operators, make_domain, DivCurlProblem, Error, EulerianModel, LagrangianModel, MaterialParams,
    ModalOperatorSet, ModeModel, ModelFamily, ModelTag, PotentialModeState, PotentialModel,
};

fn to_py(e: Error) -> PyErr {
    match e {
        Error::ConfigParse(_) | Error::Validation { .. } | Error::AssumptionAViolated { .. } => {
            PyValueError::new_err(e.to_string())
        }
        _ => PyRuntimeError::new_err(e.to_string()),
    }
}

fn command(name: &str) -> PyResult<Command> {
    match name {
        "simulate" => Ok(Command::Simulate),
        "convergence" => Ok(Command::Convergence),
        "equivalence" => Ok(Command::Equivalence),
        "verify" => Ok(Command::Verify),
        other => Err(PyValueError::new_err(format!("unknown command `{other}`"))),
    }
}

fn integrator(dt: f64, t_end: f64, scheme: &str) -> PyResult<IntegratorConfig> {
    match scheme {
        "implicit_midpoint" | "midpoint" => Ok(IntegratorConfig::midpoint(dt, t_end)),
        "rk4" | "explicit_rk4" => Ok(IntegratorConfig::rk4(dt, t_end)),
        other => Err(PyValueError::new_err(format!("unknown scheme `{other}`"))),
    }
}

/// Material constants of the fluid and the membrane.
#[pyclass(name = "Material", module = "acousticbc", frozen, skip_from_py_object)]
#[derive(Clone, Copy)]
struct PyMaterial {
    inner: MaterialParams,
}

#[pymethods]
impl PyMaterial {
    #[new]
    #[pyo3(signature = (rho0, bulk_modulus, mu, sigma, delta, kappa))]
    fn new(rho0: f64, bulk_modulus: f64, mu: f64, sigma: f64, delta: f64, kappa: f64) -> PyResult<Self> {
        let inner = MaterialParams {
            rho0,
            bulk: bulk_modulus,
            mu,
            sigma,
            delta,
            kappa,
        }
        .validate()
        .map_err(to_py)?;
        Ok(Self { inner })
    }

    #[getter]
    fn rho0(&self) -> f64 {
        self.inner.rho0
    }
    #[getter]
    fn bulk_modulus(&self) -> f64 {
        self.inner.bulk
    }
    #[getter]
    fn mu(&self) -> f64 {
        self.inner.mu
    }
    #[getter]
    fn sigma(&self) -> f64 {
        self.inner.sigma
    }
    #[getter]
    fn delta(&self) -> f64 {
        self.inner.delta
    }
    #[getter]
    fn kappa(&self) -> f64 {
        self.inner.kappa
    }

    fn sound_speed_sq(&self) -> f64 {
        self.inner.sound_speed_sq()
    }

    fn __repr__(&self) -> String {
        let m = &self.inner;
        format!(
            "Material(rho0={}, bulk_modulus={}, mu={}, sigma={}, delta={}, kappa={})",
            m.rho0, m.bulk, m.mu, m.sigma, m.delta, m.kappa
        )
    }
}

/// Radial operators of one harmonic degree on a ball or shell grid.
#[pyclass(name = "ModeOperators", module = "acousticbc", frozen)]
struct PyOperators {
    inner: ModalOperatorSet,
}

#[pymethods]
impl PyOperators {
    #[new]
    #[pyo3(signature = (inner_radius, outer_radius, nodes, degree))]
    fn new(inner_radius: f64, outer_radius: f64, nodes: usize, degree: u32) -> PyResult<Self> {
        let (d, g) = make_domain(inner_radius, outer_radius, nodes).map_err(to_py)?;
        Ok(Self {
            inner: assemble_mode_operators(&d, &g, degree),
        })
    }

    #[getter]
    fn degree(&self) -> u32 {
        self.inner.degree()
    }

    #[getter]
    fn nodes(&self) -> Vec<f64> {
        self.inner.nodes().to_vec()
    }

    #[getter]
    fn faces(&self) -> Vec<f64> {
        self.inner.faces().to_vec()
    }

    #[getter]
    fn spacing(&self) -> f64 {
        self.inner.grid().spacing()
    }

    fn __len__(&self) -> usize {
        self.inner.len()
    }

    fn grad(&self, psi: Vec<f64>, inner: f64, outer: f64) -> PyResult<Vec<f64>> {
        self.expect_nodes(&psi)?;
        Ok(self.inner.grad(&psi, inner, outer))
    }

    fn tangential(&self, psi: Vec<f64>) -> PyResult<Vec<f64>> {
        self.expect_nodes(&psi)?;
        Ok(self.inner.tangential(&psi))
    }

    fn div(&self, f: Vec<f64>, g: Vec<f64>) -> PyResult<Vec<f64>> {
        self.expect_nodes(&g)?;
        if f.len() != self.inner.len() + 1 {
            return Err(PyValueError::new_err(format!("expected {} face values", self.inner.len() + 1)));
        }
        Ok(self.inner.div(&f, &g))
    }

    fn lap(&self, psi: Vec<f64>, inner_flux: f64, outer_flux: f64) -> PyResult<Vec<f64>> {
        self.expect_nodes(&psi)?;
        Ok(self.inner.lap(&psi, inner_flux, outer_flux))
    }

    fn volume_integral(&self, phi: Vec<f64>) -> PyResult<f64> {
        self.inner.volume_integral(&phi).map_err(to_py)
    }

    /// Solves div F = w, curl F = 0 with outer normal trace `vbar`; returns `(f, g, psi)`.
    fn solve_div_curl(&self, material: &PyMaterial, w: Vec<f64>, vbar: f64) -> PyResult<(Vec<f64>, Vec<f64>, Vec<f64>)> {
        self.expect_nodes(&w)?;
        let p = DivCurlProblem {
            degree: self.inner.degree(),
            w,
            vbar,
        };
        let s = acousticbc::solve_div_curl(&self.inner, &material.inner, &p).map_err(to_py)?;
        Ok((s.f, s.g, s.psi))
    }
}

impl PyOperators {
    fn expect_nodes(&self, v: &[f64]) -> PyResult<()> {
        if v.len() == self.inner.len() {
            Ok(())
        } else {
            Err(PyValueError::new_err(format!("expected {} node values, got {}", self.inner.len(), v.len())))
        }
    }
}

type Series = BTreeMap<&'static str, Vec<f64>>;

fn series<M: ModeModel>(model: &M, t: &TrajectoryRecord<M::State>) -> (Series, f64, f64) {
    let mut out = Series::new();
    out.insert("time", t.times.clone());
    out.insert("total_energy", t.energies.iter().map(|e| e.total).collect());
    out.insert("dissipation", t.dissipation.clone());
    out.insert("constraint", t.states.iter().map(|s| model.constraint(s)).collect());
    out.insert("curl_defect", t.states.iter().map(|s| model.curl_defect(s)).collect());
    let (v, vt): (Vec<f64>, Vec<f64>) = t.states.iter().map(|s| model.membrane(s)).unzip();
    out.insert("v", v);
    out.insert("vt", vt);
    let cons = audit_conservation(t, model);
    (out, audit_energy(t).residual, cons.constraint_drift)
}

/// Evolves potential data given on the grid nodes. Returns the time series and the
/// final `(u, ut)`.
#[pyfunction]
#[pyo3(signature = (ops, material, u, ut, v, vt, dt, t_end, scheme = "implicit_midpoint", constrained = false))]
#[allow(clippy::too_many_arguments)]
fn evolve_potential(
    py: Python<'_>,
    ops: &PyOperators,
    material: &PyMaterial,
    u: Vec<f64>,
    ut: Vec<f64>,
    v: f64,
    vt: f64,
    dt: f64,
    t_end: f64,
    scheme: &str,
    constrained: bool,
) -> PyResult<(Series, Vec<f64>, Vec<f64>)> {
    ops.expect_nodes(&u)?;
    ops.expect_nodes(&ut)?;
    let cfg = integrator(dt, t_end, scheme)?;
    let tag = if constrained { ModelTag::Pc } else { ModelTag::P };
    let s = PotentialModeState {
        degree: ops.inner.degree(),
        u,
        ut,
        v,
        vt,
    };
    let model = PotentialModel::new(ops.inner.clone(), material.inner);
    let t = py.detach(|| evolve(&model, tag, &s, &cfg)).map_err(to_py)?;
    let last = t.states.last().expect("initial state is recorded");
    let (u, ut) = (last.u.clone(), last.ut.clone());
    Ok((series(&model, &t).0, u, ut))
}

/// Evolves seeded random compatible data in the given model and reports the time series
/// with the energy-identity residual and the constraint drift.
#[pyfunction]
#[pyo3(signature = (model, ops, material, seed, dt, t_end, scheme = "implicit_midpoint"))]
#[allow(clippy::too_many_arguments)]
fn evolve_random(
    py: Python<'_>,
    model: &str,
    ops: &PyOperators,
    material: &PyMaterial,
    seed: u64,
    dt: f64,
    t_end: f64,
    scheme: &str,
) -> PyResult<(Series, f64, f64)> {
    let tag: ModelTag = model.parse().map_err(to_py)?;
    let cfg = integrator(dt, t_end, scheme)?;
    let (o, m) = (&ops.inner, material.inner);
    let constrained = tag.is_constrained() || tag.family() == ModelFamily::Lagrangian;
    py.detach(|| {
        let p = compatible_potential(o, &m, &mut SplitMix64::new(seed), 3, constrained)?;
        match tag.family() {
            ModelFamily::Potential => {
                let model = PotentialModel::new(o.clone(), m);
                Ok(series(&model, &evolve(&model, tag, &p, &cfg)?))
            }
            ModelFamily::Lagrangian => {
                let model = LagrangianModel::new(o.clone(), m);
                let s = map_potential_to_lagrangian(o, &m, &p)?;
                Ok(series(&model, &evolve(&model, tag, &s, &cfg)?))
            }
            ModelFamily::Eulerian => {
                let model = EulerianModel::new(o.clone(), m);
                let s = map_potential_to_eulerian(o, &m, &p);
                Ok(series(&model, &evolve(&model, tag, &s, &cfg)?))
            }
        }
    })
    .map_err(to_py)
}

/// Runs a CLI command on a config file and writes its artifacts. Returns `(passed, files)`.
#[pyfunction]
#[pyo3(signature = (command_name, path, tol_scale = 1.0))]
fn run_config(py: Python<'_>, command_name: &str, path: PathBuf, tol_scale: f64) -> PyResult<(bool, Vec<PathBuf>)> {
    let cmd = command(command_name)?;
    let opts = RunOptions {
        tol_scale,
        threads: None,
    };
    let r = py.detach(|| run_file(cmd, &path, &opts)).map_err(to_py)?;
    Ok((r.passed, r.files))
}

/// Runs a CLI command on a config given as JSON text without writing files. Returns the
/// summary as JSON text and the time-series rows as JSON text.
#[pyfunction]
#[pyo3(signature = (command_name, config, tol_scale = 1.0))]
fn run_json(py: Python<'_>, command_name: &str, config: &str, tol_scale: f64) -> PyResult<(String, String)> {
    let cmd = command(command_name)?;
    let opts = RunOptions {
        tol_scale,
        threads: None,
    };
    let out = py
        .detach(|| {
            let sc = Scenario::from_json(config)?;
            execute(cmd, &sc, config.as_bytes(), &opts)
        })
        .map_err(to_py)?;
    let summary = serde_json::to_string(&out.summary).map_err(|e| PyRuntimeError::new_err(e.to_string()))?;
    let rows = serde_json::to_string(&out.rows).map_err(|e| PyRuntimeError::new_err(e.to_string()))?;
    Ok((summary, rows))
}

#[pymodule]
#[pyo3(name = "acousticbc")]
fn acousticbc_module(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyMaterial>()?;
    m.add_class::<PyOperators>()?;
    m.add_function(wrap_pyfunction!(evolve_potential, m)?)?;
    m.add_function(wrap_pyfunction!(evolve_random, m)?)?;
    m.add_function(wrap_pyfunction!(run_config, m)?)?;
    m.add_function(wrap_pyfunction!(run_json, m)?)?;
    Ok(())
}
