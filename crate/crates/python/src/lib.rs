//! Python bindings. Fields cross the boundary as plain lists of floats.

use std::path::PathBuf;

use ergocov_core::cga::{self, KinematicChain, Multivector, PrimitiveKind};
use ergocov_core::harness::{self, DemoConfig, ScenarioConfig, SweepSpec};
use ergocov_core::laplacian::{build_laplacian, LaplacianOperator, LaplacianParams};
use ergocov_core::pointcloud::{mean_spacing, voxel_downsample, PointCloud};
use ergocov_core::spectral::{self, SpectralBasis};
use ergocov_core::{fixtures, Error, Vec3};
use nalgebra::DVector;
use pyo3::create_exception;
use pyo3::exceptions::{PyException, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

create_exception!(ergocov, ErgocovError, PyException);

fn err(e: Error) -> PyErr {
    match e {
        Error::Config(_) | Error::Domain(_) | Error::Parse { .. } => {
            PyValueError::new_err(e.to_string())
        }
        _ => ErgocovError::new_err(e.to_string()),
    }
}

fn vec3(p: [f64; 3]) -> Vec3 {
    Vec3::from(p)
}

fn arr(v: &Vec3) -> [f64; 3] {
    [v.x, v.y, v.z]
}

fn json_to_py<'py>(py: Python<'py>, text: &str) -> PyResult<Bound<'py, PyAny>> {
    py.import("json")?.call_method1("loads", (text,))
}

#[pyclass(name = "PointCloud", module = "ergocov", frozen)]
struct PyPointCloud {
    inner: PointCloud,
}

#[pymethods]
impl PyPointCloud {
    #[new]
    #[pyo3(signature = (points, target = None))]
    fn new(points: Vec<[f64; 3]>, target: Option<Vec<f64>>) -> PyResult<Self> {
        let mut inner = PointCloud::new(points.into_iter().map(vec3).collect()).map_err(err)?;
        if let Some(t) = target {
            inner.set_target(t).map_err(err)?;
        }
        Ok(PyPointCloud { inner })
    }

    /// Reads a `.csv` or ASCII `.ply` file.
    #[staticmethod]
    fn load(path: PathBuf) -> PyResult<Self> {
        Ok(PyPointCloud {
            inner: PointCloud::load(&path).map_err(err)?,
        })
    }

    #[staticmethod]
    fn grid(nx: usize, ny: usize, spacing: f64) -> Self {
        PyPointCloud {
            inner: fixtures::grid(nx, ny, spacing),
        }
    }

    #[staticmethod]
    #[pyo3(signature = (nx, ny, spacing, amplitude, seed = 0))]
    fn wavy_sheet(nx: usize, ny: usize, spacing: f64, amplitude: f64, seed: u64) -> Self {
        PyPointCloud {
            inner: fixtures::wavy_sheet(nx, ny, spacing, amplitude, seed),
        }
    }

    #[staticmethod]
    fn fibonacci_sphere(n: usize, radius: f64) -> Self {
        PyPointCloud {
            inner: fixtures::fibonacci_sphere(n, radius),
        }
    }

    fn __len__(&self) -> usize {
        self.inner.len()
    }

    fn points(&self) -> Vec<[f64; 3]> {
        self.inner.positions().iter().map(arr).collect()
    }

    fn target(&self) -> Option<Vec<f64>> {
        self.inner.target().map(<[f64]>::to_vec)
    }

    fn mean_spacing(&self) -> PyResult<f64> {
        mean_spacing(&self.inner).map_err(err)
    }

    fn voxel_downsample(&self, voxel: f64) -> PyResult<Self> {
        Ok(PyPointCloud {
            inner: voxel_downsample(&self.inner, voxel).map_err(err)?,
        })
    }

    /// Mass of each point inside the painted disks `(center, radius, mass)`.
    fn painted_disks(&self, disks: Vec<([f64; 3], f64, f64)>) -> Vec<f64> {
        let d: Vec<_> = disks.into_iter().map(|(c, r, m)| (vec3(c), r, m)).collect();
        fixtures::painted_disks(&self.inner, &d)
    }

    fn __repr__(&self) -> String {
        format!("PointCloud({} points)", self.inner.len())
    }
}

#[pyclass(name = "LaplacianOperator", module = "ergocov", frozen)]
struct PyLaplacian {
    inner: LaplacianOperator,
}

#[pymethods]
impl PyLaplacian {
    #[new]
    #[pyo3(signature = (cloud, k = 12, mollify = 1e-5))]
    fn new(cloud: &PyPointCloud, k: usize, mollify: f64) -> PyResult<Self> {
        let op = build_laplacian(&cloud.inner, &LaplacianParams { k, mollify }).map_err(err)?;
        Ok(PyLaplacian { inner: op })
    }

    fn __len__(&self) -> usize {
        self.inner.len()
    }

    fn mass(&self) -> Vec<f64> {
        self.inner.mass().to_vec()
    }

    /// `S u`.
    fn apply(&self, u: Vec<f64>) -> PyResult<Vec<f64>> {
        if u.len() != self.inner.len() {
            return Err(PyValueError::new_err("field length does not match the operator"));
        }
        Ok(self.inner.stiffness().mul_vec(&u))
    }

    /// Stiffness as `(rows, cols, values)` triplets.
    fn stiffness_triplets(&self) -> (Vec<usize>, Vec<usize>, Vec<f64>) {
        let s = self.inner.stiffness();
        let (mut r, mut c, mut v) = (Vec::new(), Vec::new(), Vec::new());
        for (i, j, x) in s.triplets() {
            r.push(i);
            c.push(j);
            v.push(x);
        }
        (r, c, v)
    }

    fn boundary(&self) -> Vec<bool> {
        self.inner.boundary().to_vec()
    }

    fn spacing(&self) -> f64 {
        self.inner.spacing()
    }

    /// Backward-Euler diffusion `(M + τS)⁻¹ M u₀`.
    fn diffuse_implicit(&self, u0: Vec<f64>, tau: f64) -> PyResult<Vec<f64>> {
        spectral::diffuse_implicit(&self.inner, &u0, tau).map_err(err)
    }

    fn basis(&self, n_modes: usize) -> PyResult<PyBasis> {
        Ok(PyBasis {
            inner: spectral::compute_basis(&self.inner, n_modes).map_err(err)?,
        })
    }
}

#[pyclass(name = "SpectralBasis", module = "ergocov", frozen)]
struct PyBasis {
    inner: SpectralBasis,
}

#[pymethods]
impl PyBasis {
    fn __len__(&self) -> usize {
        self.inner.len()
    }

    fn eigenvalues(&self) -> Vec<f64> {
        self.inner.eigenvalues().to_vec()
    }

    /// Mode `k` as a field over the cloud.
    fn mode(&self, k: usize) -> PyResult<Vec<f64>> {
        if k >= self.inner.len() {
            return Err(PyValueError::new_err(format!("mode {k} out of range")));
        }
        Ok(self.inner.vectors().column(k).iter().copied().collect())
    }

    fn orthonormality_error(&self) -> f64 {
        self.inner.orthonormality_error()
    }

    fn project(&self, u: Vec<f64>) -> PyResult<Vec<f64>> {
        Ok(spectral::project(&self.inner, &u).map_err(err)?.data.into())
    }

    fn reconstruct(&self, coeffs: Vec<f64>) -> PyResult<Vec<f64>> {
        spectral::reconstruct(&self.inner, &DVector::from_vec(coeffs)).map_err(err)
    }

    /// Heat flow `Φ (e^{−λτ} ⊙ ΦᵀM u₀)`.
    fn diffuse(&self, u0: Vec<f64>, tau: f64) -> PyResult<Vec<f64>> {
        spectral::diffuse_spectral(&self.inner, &u0, tau).map_err(err)
    }
}

/// `τ = α h²`.
#[pyfunction]
fn timestep(h: f64, alpha: f64) -> PyResult<f64> {
    spectral::timestep(h, alpha).map_err(err)
}

#[pyfunction]
fn ergodicity(target: Vec<f64>, coverage: Vec<f64>) -> PyResult<f64> {
    ergocov_core::coverage::ergodicity_of(&target, &coverage).map_err(err)
}

#[pyclass(name = "Multivector", module = "ergocov", frozen, skip_from_py_object)]
#[derive(Clone)]
struct PyMultivector {
    inner: Multivector,
}

fn mv(inner: Multivector) -> PyMultivector {
    PyMultivector { inner }
}

#[pymethods]
impl PyMultivector {
    /// Blade masks use bits `e0 = 1, e1 = 2, e2 = 4, e3 = 8, e∞ = 16`.
    #[new]
    #[pyo3(signature = (terms = Vec::new()))]
    fn new(terms: Vec<(usize, f64)>) -> PyResult<Self> {
        if terms.iter().any(|(m, _)| *m >= 32) {
            return Err(PyValueError::new_err("blade masks are below 32"));
        }
        Ok(mv(Multivector::from_null_terms(&terms)))
    }

    fn get(&self, mask: usize) -> PyResult<f64> {
        if mask >= 32 {
            return Err(PyValueError::new_err("blade masks are below 32"));
        }
        Ok(self.inner.get(mask))
    }

    fn coefficients(&self) -> Vec<f64> {
        self.inner.null_coefficients().to_vec()
    }

    fn grade(&self, k: u32) -> Self {
        mv(self.inner.grade(k))
    }

    fn reverse(&self) -> Self {
        mv(self.inner.reverse())
    }

    fn dual(&self) -> Self {
        mv(self.inner.dual())
    }

    fn inner_product(&self, other: &Self) -> Self {
        mv(self.inner.inner(&other.inner))
    }

    fn outer(&self, other: &Self) -> Self {
        mv(self.inner.outer(&other.inner))
    }

    fn __mul__(&self, other: &Self) -> Self {
        mv(self.inner.geometric(&other.inner))
    }

    fn __add__(&self, other: &Self) -> Self {
        mv(self.inner + other.inner)
    }

    fn __sub__(&self, other: &Self) -> Self {
        mv(self.inner - other.inner)
    }

    fn __neg__(&self) -> Self {
        mv(-self.inner)
    }

    fn __repr__(&self) -> String {
        format!("Multivector({})", self.inner)
    }
}

#[pyfunction]
fn embed_point(x: [f64; 3]) -> PyMultivector {
    mv(cga::embed_point(&vec3(x)))
}

#[pyfunction]
fn extract_point(p: &PyMultivector) -> PyResult<[f64; 3]> {
    Ok(arr(&cga::extract_point(&p.inner).map_err(err)?))
}

#[pyfunction]
fn sphere(center: [f64; 3], radius: f64) -> PyMultivector {
    mv(cga::sphere(&vec3(center), radius))
}

#[pyfunction]
fn line_through(a: [f64; 3], b: [f64; 3]) -> PyResult<PyMultivector> {
    Ok(mv(cga::line_through(&vec3(a), &vec3(b)).map_err(err)?))
}

/// Nearest point to `x` on the plane or sphere `primitive`.
#[pyfunction]
fn project_to_primitive(primitive: &PyMultivector, x: [f64; 3]) -> PyResult<[f64; 3]> {
    let point = cga::embed_point(&vec3(x));
    let pair = cga::project_to_primitive(&point, &primitive.inner).map_err(err)?;
    let nearest = cga::split_pair(&pair, &point).map_err(err)?;
    Ok(arr(&cga::extract_point(&nearest).map_err(err)?))
}

/// Least-squares plane or sphere through the points, as a dict with
/// `kind`, `element`, `residuals` and either `center`/`radius` or
/// `normal`/`distance`.
#[pyfunction]
fn fit_primitive<'py>(py: Python<'py>, points: Vec<[f64; 3]>) -> PyResult<Bound<'py, PyDict>> {
    let pts: Vec<Vec3> = points.into_iter().map(vec3).collect();
    let fit = cga::fit_primitive(&pts).map_err(err)?;
    let d = PyDict::new(py);
    d.set_item("element", mv(*fit.element()))?;
    d.set_item("residuals", fit.residuals().to_vec())?;
    match fit.kind() {
        PrimitiveKind::Sphere => {
            d.set_item("kind", "sphere")?;
            d.set_item("center", fit.center().map(|c| arr(&c)))?;
            d.set_item("radius", fit.radius())?;
        }
        PrimitiveKind::Plane => {
            d.set_item("kind", "plane")?;
            if let Some((n, dist)) = fit.plane() {
                d.set_item("normal", arr(&n))?;
                d.set_item("distance", dist)?;
            }
        }
    }
    Ok(d)
}

#[pyclass(name = "KinematicChain", module = "ergocov", frozen)]
struct PyChain {
    inner: KinematicChain,
}

#[pymethods]
impl PyChain {
    /// Revolute joints given as `(axis, point)` at zero configuration, and a
    /// home pose of the tool as a rotation matrix and translation.
    #[new]
    #[pyo3(signature = (joints, rotation = None, translation = None))]
    fn new(
        joints: Vec<([f64; 3], [f64; 3])>,
        rotation: Option<[[f64; 3]; 3]>,
        translation: Option<[f64; 3]>,
    ) -> PyResult<Self> {
        let screws = joints
            .iter()
            .map(|(a, p)| cga::revolute_screw(&vec3(*a), &vec3(*p)))
            .collect();
        let r = rotation.map_or_else(nalgebra::Matrix3::identity, |r| {
            nalgebra::Matrix3::from_fn(|i, j| r[i][j])
        });
        let rot = nalgebra::Rotation3::from_matrix(&r);
        let base = cga::motor_from_rotation_translation(&rot, &vec3(translation.unwrap_or_default()));
        Ok(PyChain {
            inner: KinematicChain::new(screws, base).map_err(err)?,
        })
    }

    /// Seven-joint arm used by the demos and tests.
    #[staticmethod]
    fn panda_like() -> Self {
        PyChain {
            inner: KinematicChain::panda_like(),
        }
    }

    fn __len__(&self) -> usize {
        self.inner.len()
    }

    fn end_effector_position(&self, q: Vec<f64>) -> PyResult<[f64; 3]> {
        Ok(arr(&cga::end_effector_position(&self.inner, &q).map_err(err)?))
    }

    /// Tool pose as `(rotation rows, translation)`.
    fn forward_kinematics(&self, q: Vec<f64>) -> PyResult<([[f64; 3]; 3], [f64; 3])> {
        let m = cga::forward_kinematics(&self.inner, &q).map_err(err)?;
        let (r, t) = cga::motor_to_rotation_translation(&m).map_err(err)?;
        Ok((
            [
                [r[(0, 0)], r[(0, 1)], r[(0, 2)]],
                [r[(1, 0)], r[(1, 1)], r[(1, 2)]],
                [r[(2, 0)], r[(2, 1)], r[(2, 2)]],
            ],
            arr(&t),
        ))
    }

    /// End-effector-frame Jacobian columns as multivectors.
    fn jacobian(&self, q: Vec<f64>) -> PyResult<Vec<PyMultivector>> {
        Ok(cga::ee_frame_jacobian(&self.inner, &q)
            .map_err(err)?
            .into_iter()
            .map(mv)
            .collect())
    }
}

/// Toy closed loop: rows of `t`, `q`, `torques`, `line_error`, `wrench_error`.
/// `config` is a JSON object with any of the demo settings.
#[pyfunction]
#[pyo3(signature = (config = None))]
fn control_demo<'py>(py: Python<'py>, config: Option<&str>) -> PyResult<Bound<'py, PyAny>> {
    let cfg: DemoConfig = match config {
        Some(text) => serde_json::from_str(text).map_err(|e| PyValueError::new_err(e.to_string()))?,
        None => DemoConfig::default(),
    };
    let records = harness::control_demo(&KinematicChain::panda_like(), &cfg).map_err(err)?;
    json_to_py(py, &serde_json::to_string(&records).expect("records serialize"))
}

/// Result of one scenario run.
#[pyclass(name = "RunTrace", module = "ergocov", frozen)]
struct PyTrace {
    inner: harness::RunTrace,
}

#[pymethods]
impl PyTrace {
    fn __len__(&self) -> usize {
        self.inner.records.len()
    }

    fn summary<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyAny>> {
        json_to_py(py, &serde_json::to_string(&self.inner.summary).expect("summary serializes"))
    }

    fn ergodicity(&self) -> Vec<f64> {
        self.inner.records.iter().map(|r| r.ergodicity).collect()
    }

    fn positions(&self) -> Vec<[f64; 3]> {
        self.inner.records.iter().map(|r| arr(&r.position)).collect()
    }

    fn trace_csv(&self) -> String {
        self.inner.trace_csv()
    }

    fn write(&self, dir: PathBuf) -> PyResult<()> {
        self.inner.write(&dir).map_err(err)
    }
}

/// Runs a scenario given as a JSON document. Relative paths resolve
/// against `base_dir`.
#[pyfunction]
#[pyo3(signature = (config, base_dir = PathBuf::from(".")))]
fn run_scenario(py: Python<'_>, config: &str, base_dir: PathBuf) -> PyResult<PyTrace> {
    let cfg = ScenarioConfig::from_json(config).map_err(err)?;
    let trace = py
        .detach(|| harness::run_scenario(&cfg, &base_dir))
        .map_err(err)?;
    Ok(PyTrace { inner: trace })
}

/// Runs a sweep given as a JSON document and returns `{"runs", "cells"}`.
#[pyfunction]
#[pyo3(signature = (spec, base_dir = PathBuf::from(".")))]
fn run_sweep<'py>(py: Python<'py>, spec: &str, base_dir: PathBuf) -> PyResult<Bound<'py, PyAny>> {
    let spec = SweepSpec::from_json(spec).map_err(err)?;
    let report = py.detach(|| harness::run_sweep(&spec, &base_dir)).map_err(err)?;
    json_to_py(py, &serde_json::to_string(&report).expect("report serializes"))
}

#[pymodule(name = "ergocov")]
fn ergocov_module(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("ErgocovError", m.py().get_type::<ErgocovError>())?;
    m.add_class::<PyPointCloud>()?;
    m.add_class::<PyLaplacian>()?;
    m.add_class::<PyBasis>()?;
    m.add_class::<PyMultivector>()?;
    m.add_class::<PyChain>()?;
    m.add_class::<PyTrace>()?;
    m.add_function(wrap_pyfunction!(timestep, m)?)?;
    m.add_function(wrap_pyfunction!(ergodicity, m)?)?;
    m.add_function(wrap_pyfunction!(embed_point, m)?)?;
    m.add_function(wrap_pyfunction!(extract_point, m)?)?;
    m.add_function(wrap_pyfunction!(sphere, m)?)?;
    m.add_function(wrap_pyfunction!(line_through, m)?)?;
    m.add_function(wrap_pyfunction!(project_to_primitive, m)?)?;
    m.add_function(wrap_pyfunction!(fit_primitive, m)?)?;
    m.add_function(wrap_pyfunction!(control_demo, m)?)?;
    m.add_function(wrap_pyfunction!(run_scenario, m)?)?;
    m.add_function(wrap_pyfunction!(run_sweep, m)?)?;
    Ok(())
}
