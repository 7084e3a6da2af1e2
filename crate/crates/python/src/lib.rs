use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufReader, BufWriter};

use cam_core::bridge::{self, Inversion, JShiftingParams};
use cam_core::mulholland::{self, DecomposeOptions, DecompositionResult, FanoFeature};
use cam_core::pade::{self, Axis, ComplexPole, PadePolicy, RationalApproximant};
use cam_core::scatter::{self, LoadOptions};
use cam_core::synth::{self, PoleModelSpec};
use cam_core::trajectory::{self, CETrajectory, ReggeTrajectory, TrackPolicy};
use cam_core::Complex64;
use pyo3::exceptions::{PyArithmeticError, PyOSError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;
use serde::de::DeserializeOwned;

fn to_py(err: cam_core::Error) -> PyErr {
    match err {
        cam_core::Error::Io(e) => PyOSError::new_err(e.to_string()),
        e if e.is_numerical() => PyArithmeticError::new_err(e.to_string()),
        e => PyValueError::new_err(e.to_string()),
    }
}

fn io(path: &str, err: std::io::Error) -> PyErr {
    PyOSError::new_err(format!("{path}: {err}"))
}

/// Accepts a JSON string or a dict.
fn from_json<T: DeserializeOwned>(obj: &Bound<'_, PyAny>) -> PyResult<T> {
    let text: String = if obj.is_instance_of::<PyDict>() {
        let json = obj.py().import("json")?;
        json.call_method1("dumps", (obj,))?.extract()?
    } else {
        obj.extract()?
    };
    serde_json::from_str(&text).map_err(|e| PyValueError::new_err(e.to_string()))
}

fn policy<T: DeserializeOwned + Default>(obj: Option<&Bound<'_, PyAny>>) -> PyResult<T> {
    obj.map_or_else(|| Ok(T::default()), from_json)
}

fn axis_of(tag: &str) -> PyResult<Axis> {
    Axis::from_tag(tag).ok_or_else(|| PyValueError::new_err(format!("axis must be 'J' or 'E', got {tag:?}")))
}

#[pyclass(name = "Pole", module = "cam_regge", frozen)]
#[derive(Clone)]
struct PyPole(ComplexPole);

#[pymethods]
impl PyPole {
    #[getter]
    fn position(&self) -> Complex64 {
        self.0.position
    }

    #[getter]
    fn residue(&self) -> Option<Complex64> {
        self.0.residue
    }

    #[getter]
    fn multiplicity(&self) -> usize {
        self.0.multiplicity
    }

    #[getter]
    fn pole_zero_distance(&self) -> f64 {
        self.0.quality.pole_zero_distance
    }

    #[getter]
    fn stability(&self) -> Option<f64> {
        self.0.quality.stability
    }

    #[getter]
    fn flags(&self) -> Vec<&'static str> {
        self.0.flags()
    }

    fn __repr__(&self) -> String {
        let z = self.0.position;
        format!("Pole({}{:+}j)", z.re, z.im)
    }
}

fn wrap_poles(poles: Vec<ComplexPole>) -> Vec<PyPole> {
    poles.into_iter().map(PyPole).collect()
}

#[pyclass(name = "SMatrixTable", module = "cam_regge")]
struct PyTable(scatter::SMatrixTable);

#[pymethods]
impl PyTable {
    #[staticmethod]
    #[pyo3(signature = (path, unitarity_slack = scatter::DEFAULT_UNITARITY_SLACK))]
    fn from_csv(path: &str, unitarity_slack: f64) -> PyResult<Self> {
        let file = File::open(path).map_err(|e| io(path, e))?;
        let options = LoadOptions { unitarity_slack };
        scatter::load_smatrix_table(BufReader::new(file), &options).map(PyTable).map_err(to_py)
    }

    fn to_csv(&self, path: &str) -> PyResult<()> {
        let file = File::create(path).map_err(|e| io(path, e))?;
        scatter::write_smatrix_csv(&self.0, BufWriter::new(file)).map_err(to_py)
    }

    #[getter]
    fn energies(&self) -> Vec<f64> {
        self.0.energies().to_vec()
    }

    #[getter]
    fn j_values(&self) -> Vec<u32> {
        self.0.j_values().collect()
    }

    #[getter]
    fn warnings(&self) -> Vec<String> {
        self.0.warnings.iter().map(|w| w.to_string()).collect()
    }

    /// S at grid indices (energy, J - J_min).
    fn s(&self, ie: usize, ij: usize) -> PyResult<Complex64> {
        if ie >= self.0.energies().len() || ij >= self.0.n_j() {
            return Err(PyValueError::new_err("index out of range"));
        }
        Ok(self.0.s(ie, ij))
    }

    /// Partial-wave integral cross section (Å²) at a grid energy.
    fn ics(&self, energy: f64) -> PyResult<f64> {
        scatter::pws_ics(&self.0, energy).map_err(to_py)
    }

    fn __len__(&self) -> usize {
        self.0.energies().len()
    }
}

#[pyclass(name = "PoleModel", module = "cam_regge")]
struct PyPoleModel(PoleModelSpec);

#[pymethods]
impl PyPoleModel {
    #[new]
    fn new(spec: &Bound<'_, PyAny>) -> PyResult<Self> {
        let spec: PoleModelSpec = from_json(spec)?;
        spec.validate().map_err(to_py)?;
        Ok(PyPoleModel(spec))
    }

    #[staticmethod]
    fn from_file(path: &str) -> PyResult<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| io(path, e))?;
        let spec: PoleModelSpec = serde_json::from_str(&text).map_err(|e| PyValueError::new_err(e.to_string()))?;
        spec.validate().map_err(to_py)?;
        Ok(PyPoleModel(spec))
    }

    fn generate_table(&self) -> PyResult<PyTable> {
        synth::generate_table(&self.0).map(PyTable).map_err(to_py)
    }

    fn exact_poles(&self, energy: f64) -> PyResult<Vec<PyPole>> {
        synth::exact_poles(&self.0, energy).map(wrap_poles).map_err(to_py)
    }

    fn exact_ics(&self, energy: f64) -> PyResult<f64> {
        synth::exact_ics(&self.0, energy).map_err(to_py)
    }

    fn to_json(&self) -> PyResult<String> {
        serde_json::to_string(&self.0).map_err(|e| PyValueError::new_err(e.to_string()))
    }
}

/// Rational interpolant of samples on one real axis.
#[pyclass(name = "RationalApproximant", module = "cam_regge")]
struct PyApproximant(RationalApproximant);

#[pymethods]
impl PyApproximant {
    #[new]
    #[pyo3(signature = (nodes, values, axis = "J", fixed_value = f64::NAN, options = None))]
    fn new(
        nodes: Vec<f64>,
        values: Vec<Complex64>,
        axis: &str,
        fixed_value: f64,
        options: Option<&Bound<'_, PyAny>>,
    ) -> PyResult<Self> {
        if nodes.len() != values.len() {
            return Err(PyValueError::new_err("nodes and values differ in length"));
        }
        let samples: Vec<(f64, Complex64)> = nodes.into_iter().zip(values).collect();
        let options = policy(options)?;
        RationalApproximant::build(axis_of(axis)?, fixed_value, &samples, &options)
            .map(PyApproximant)
            .map_err(to_py)
    }

    fn __call__(&self, z: Complex64) -> PyResult<Complex64> {
        self.0.evaluate(z).map_err(to_py)
    }

    /// Every denominator root, unfiltered.
    fn poles(&self) -> Vec<PyPole> {
        wrap_poles(pade::extract_poles(&self.0))
    }

    fn zeros(&self) -> Vec<Complex64> {
        self.0.zeros()
    }

    #[getter]
    fn degrees(&self) -> (usize, usize) {
        (self.0.numerator_degree(), self.0.denominator_degree())
    }
}

/// Filtered poles of the continuation of samples along one axis.
#[pyfunction]
#[pyo3(signature = (nodes, values, axis = "J", fixed_value = f64::NAN, policy = None))]
fn find_poles(
    nodes: Vec<f64>,
    values: Vec<Complex64>,
    axis: &str,
    fixed_value: f64,
    policy: Option<&Bound<'_, PyAny>>,
) -> PyResult<Vec<PyPole>> {
    if nodes.len() != values.len() {
        return Err(PyValueError::new_err("nodes and values differ in length"));
    }
    let samples: Vec<(f64, Complex64)> = nodes.into_iter().zip(values).collect();
    let policy: PadePolicy = self::policy(policy)?;
    policy.validate().map_err(to_py)?;
    pade::poles_along_axis(axis_of(axis)?, fixed_value, &samples, &policy)
        .map(wrap_poles)
        .map_err(to_py)
}

fn collect_frames<K>(found: Vec<(K, cam_core::Result<Vec<ComplexPole>>)>) -> PyResult<Vec<(K, Vec<PyPole>)>> {
    found
        .into_iter()
        .map(|(k, r)| r.map(|p| (k, wrap_poles(p))).map_err(to_py))
        .collect()
}

/// Regge poles at every energy of the table.
#[pyfunction]
#[pyo3(signature = (table, policy = None))]
fn poles_j(py: Python<'_>, table: &PyTable, policy: Option<&Bound<'_, PyAny>>) -> PyResult<Vec<(f64, Vec<PyPole>)>> {
    let policy: PadePolicy = self::policy(policy)?;
    policy.validate().map_err(to_py)?;
    collect_frames(py.allow_threads(|| pade::poles_per_energy(&table.0, &policy)))
}

/// Complex-energy poles at every J of the table.
#[pyfunction]
#[pyo3(signature = (table, policy = None))]
fn poles_e(py: Python<'_>, table: &PyTable, policy: Option<&Bound<'_, PyAny>>) -> PyResult<Vec<(u32, Vec<PyPole>)>> {
    let policy: PadePolicy = self::policy(policy)?;
    policy.validate().map_err(to_py)?;
    collect_frames(py.allow_threads(|| pade::poles_per_j(&table.0, &policy)))
}

#[pyclass(name = "ReggeTrajectory", module = "cam_regge")]
#[derive(Clone)]
struct PyRegge(ReggeTrajectory);

#[pymethods]
impl PyRegge {
    #[getter]
    fn label(&self) -> String {
        self.0.label.clone()
    }

    #[getter]
    fn energies(&self) -> Vec<f64> {
        self.0.energies()
    }

    #[getter]
    fn lambdas(&self) -> Vec<Complex64> {
        self.0.entries.iter().map(|e| e.lambda).collect()
    }

    /// Complex angular momentum J = λ - 1/2.
    #[getter]
    fn j(&self) -> Vec<Complex64> {
        self.0.entries.iter().map(|e| e.j()).collect()
    }

    #[getter]
    fn residues(&self) -> Vec<Complex64> {
        self.0.entries.iter().map(|e| e.residue).collect()
    }

    #[getter]
    fn gaps(&self) -> Vec<(f64, f64)> {
        self.0.gaps.iter().map(|g| (g.start(), g.end())).collect()
    }

    /// (K, energy) wherever Re J passes an integer K.
    fn integer_crossings(&self) -> Vec<(u32, f64)> {
        self.0.integer_crossings().into_iter().map(|c| (c.k, c.energy)).collect()
    }

    fn classify(&self) -> String {
        trajectory::classify_type(&self.0).to_string()
    }

    fn __len__(&self) -> usize {
        self.0.entries.len()
    }

    fn __repr__(&self) -> String {
        format!("ReggeTrajectory({:?}, {} entries)", self.0.label, self.0.entries.len())
    }
}

#[pyclass(name = "CETrajectory", module = "cam_regge")]
#[derive(Clone)]
struct PyCE(CETrajectory);

#[pymethods]
impl PyCE {
    #[new]
    #[pyo3(signature = (label, j_values, energies, residues = None))]
    fn new(label: String, j_values: Vec<u32>, energies: Vec<Complex64>, residues: Option<Vec<Complex64>>) -> PyResult<Self> {
        if j_values.len() != energies.len() || residues.as_ref().is_some_and(|r| r.len() != energies.len()) {
            return Err(PyValueError::new_err("j_values, energies and residues differ in length"));
        }
        let residues = residues.unwrap_or_else(|| vec![Complex64::new(f64::NAN, f64::NAN); energies.len()]);
        let entries = j_values
            .into_iter()
            .zip(energies)
            .zip(residues)
            .map(|((j, energy), residue)| trajectory::CEEntry { j, energy, residue })
            .collect();
        Ok(PyCE(CETrajectory { label, entries }))
    }

    #[getter]
    fn label(&self) -> String {
        self.0.label.clone()
    }

    #[getter]
    fn j_values(&self) -> Vec<u32> {
        self.0.entries.iter().map(|e| e.j).collect()
    }

    #[getter]
    fn energies(&self) -> Vec<Complex64> {
        self.0.entries.iter().map(|e| e.energy).collect()
    }

    #[getter]
    fn residues(&self) -> Vec<Complex64> {
        self.0.entries.iter().map(|e| e.residue).collect()
    }

    fn __len__(&self) -> usize {
        self.0.entries.len()
    }
}

fn unwrap_frames<K: Copy>(frames: Vec<(K, Vec<PyPole>)>) -> Vec<(K, Vec<ComplexPole>)> {
    frames
        .into_iter()
        .map(|(k, poles)| (k, poles.into_iter().map(|p| p.0).collect()))
        .collect()
}

/// Links per-energy Regge poles into trajectories.
#[pyfunction]
#[pyo3(signature = (frames, policy = None))]
fn track(frames: Vec<(f64, Vec<PyPole>)>, policy: Option<&Bound<'_, PyAny>>) -> PyResult<Vec<PyRegge>> {
    let policy: TrackPolicy = self::policy(policy)?;
    let trajs = trajectory::track(&unwrap_frames(frames), &policy).map_err(to_py)?;
    Ok(trajs.into_iter().map(PyRegge).collect())
}

/// Links per-J complex-energy poles into trajectories.
#[pyfunction]
#[pyo3(signature = (frames, policy = None))]
fn track_ce(frames: Vec<(u32, Vec<PyPole>)>, policy: Option<&Bound<'_, PyAny>>) -> PyResult<Vec<PyCE>> {
    let policy: TrackPolicy = self::policy(policy)?;
    let trajs = trajectory::track_ce(&unwrap_frames(frames), &policy).map_err(to_py)?;
    Ok(trajs.into_iter().map(PyCE).collect())
}

#[pyfunction]
fn read_trajectories(path: &str) -> PyResult<Vec<PyRegge>> {
    let file = File::open(path).map_err(|e| io(path, e))?;
    let trajs = trajectory::read_trajectories_csv(BufReader::new(file)).map_err(to_py)?;
    Ok(trajs.into_iter().map(PyRegge).collect())
}

#[pyfunction]
fn write_trajectories(path: &str, trajectories: Vec<PyRegge>) -> PyResult<()> {
    let file = File::create(path).map_err(|e| io(path, e))?;
    let trajs: Vec<ReggeTrajectory> = trajectories.into_iter().map(|t| t.0).collect();
    trajectory::write_trajectories_csv(&trajs, BufWriter::new(file)).map_err(to_py)
}

#[pyclass(name = "Decomposition", module = "cam_regge")]
struct PyDecomposition(DecompositionResult);

#[pymethods]
impl PyDecomposition {
    #[getter]
    fn energies(&self) -> Vec<f64> {
        self.0.rows.iter().map(|r| r.energy).collect()
    }

    #[getter]
    fn sigma_exact(&self) -> Vec<f64> {
        self.0.rows.iter().map(|r| r.sigma_exact).collect()
    }

    #[getter]
    fn sigma_back_integral(&self) -> Vec<f64> {
        self.0.rows.iter().map(|r| r.sigma_back_integral).collect()
    }

    /// Resonance term of each trajectory, by label.
    #[getter]
    fn sigma_res(&self) -> BTreeMap<String, Vec<f64>> {
        self.0
            .labels
            .iter()
            .enumerate()
            .map(|(n, label)| (label.clone(), self.0.rows.iter().map(|r| r.sigma_res[n]).collect()))
            .collect()
    }

    #[getter]
    fn residual(&self) -> Vec<f64> {
        self.0.rows.iter().map(|r| r.residual).collect()
    }

    /// (energy, reason) for rows that could not be completed.
    #[getter]
    fn incomplete(&self) -> Vec<(f64, String)> {
        self.0.incomplete_energies()
    }

    fn to_csv(&self, path: &str) -> PyResult<()> {
        let file = File::create(path).map_err(|e| io(path, e))?;
        mulholland::write_decomposition_csv(&self.0, BufWriter::new(file)).map_err(to_py)
    }
}

#[pyfunction]
#[pyo3(signature = (table, trajectories = Vec::new()))]
fn decompose(py: Python<'_>, table: &PyTable, trajectories: Vec<PyRegge>) -> PyDecomposition {
    let trajs: Vec<ReggeTrajectory> = trajectories.into_iter().map(|t| t.0).collect();
    PyDecomposition(py.allow_threads(|| mulholland::decompose(&table.0, &trajs, &DecomposeOptions::default())))
}

#[pyclass(name = "FanoFeature", module = "cam_regge", frozen)]
#[derive(Clone)]
struct PyFano(FanoFeature);

#[pymethods]
impl PyFano {
    #[getter]
    fn label(&self) -> String {
        self.0.label.clone()
    }

    #[getter]
    fn k(&self) -> u32 {
        self.0.k
    }

    #[getter]
    fn energy(&self) -> f64 {
        self.0.energy
    }

    #[getter]
    fn width(&self) -> Option<f64> {
        self.0.width
    }

    #[getter]
    fn strength(&self) -> Complex64 {
        self.0.strength
    }
}

/// Integer-crossing features, filling S* from the table where missing.
#[pyfunction]
fn fano_features(table: &PyTable, trajectory: &PyRegge) -> PyResult<Vec<PyFano>> {
    let mut trajs = vec![trajectory.0.clone()];
    mulholland::attach_s_conj(&table.0, &mut trajs, &Default::default()).map_err(to_py)?;
    Ok(mulholland::find_integer_crossings(&trajs[0]).into_iter().map(PyFano).collect())
}

/// Sum of Fano profiles of the features at one energy (Å²).
#[pyfunction]
fn fano_profile(features: Vec<PyFano>, k2: f64, energy: f64) -> f64 {
    let features: Vec<FanoFeature> = features.into_iter().map(|f| f.0).collect();
    mulholland::fano_approx(&features, k2, energy)
}

/// One trajectory's resonance contribution to the cross section (Å²).
#[pyfunction]
fn resonance_term(lam: Complex64, residue: Complex64, s_conj: Complex64, k2: f64) -> PyResult<f64> {
    mulholland::resonance_term(lam, residue, s_conj, k2).map_err(to_py)
}

#[pyclass(name = "LinearCEMap", module = "cam_regge")]
struct PyMap(bridge::LinearCEMap);

#[pymethods]
impl PyMap {
    /// Least-squares fit of E = AΛ + B, with Λ = J(J+1).
    #[staticmethod]
    #[pyo3(signature = (trajectory, j_window = None))]
    fn fit(trajectory: &PyCE, j_window: Option<(u32, u32)>) -> PyResult<Self> {
        bridge::fit_linear_ce(&trajectory.0, j_window.map(|(lo, hi)| lo..=hi))
            .map(PyMap)
            .map_err(to_py)
    }

    #[new]
    fn new(a: Complex64, b: Complex64) -> Self {
        PyMap(bridge::LinearCEMap::new(a, b))
    }

    #[getter]
    fn a(&self) -> Complex64 {
        self.0.a
    }

    #[getter]
    fn b(&self) -> Complex64 {
        self.0.b
    }

    #[getter]
    fn fit_residual(&self) -> f64 {
        self.0.fit_residual
    }

    /// Complex J of the Regge pole at a real energy.
    #[pyo3(signature = (energy, large_j = false))]
    fn regge_j(&self, energy: f64, large_j: bool) -> PyResult<Complex64> {
        let inversion = if large_j { Inversion::LargeJ } else { Inversion::Exact };
        bridge::ce_to_regge(&self.0, energy, inversion).map_err(to_py)
    }

    /// Complex energy of the pole at (possibly non-integer) J.
    fn ce_energy(&self, j: f64) -> Complex64 {
        bridge::regge_to_ce(&self.0, j)
    }

    /// Moment of inertia, E0 and lifetime as a dict.
    #[pyo3(signature = (a2_tol = bridge::DEFAULT_A2_TOL))]
    fn j_shifting<'py>(&self, py: Python<'py>, a2_tol: f64) -> PyResult<Bound<'py, PyDict>> {
        let JShiftingParams { inertia, e0, tau } = bridge::j_shifting_params(&self.0, a2_tol).map_err(to_py)?;
        let d = PyDict::new(py);
        d.set_item("inertia", inertia)?;
        d.set_item("e0", e0)?;
        d.set_item("tau", tau)?;
        Ok(d)
    }

    #[pyo3(signature = (a2_tol = bridge::DEFAULT_A2_TOL))]
    fn to_json(&self, a2_tol: f64) -> String {
        let params = bridge::j_shifting_params(&self.0, a2_tol).ok();
        bridge::map_json(&self.0, params.as_ref()).to_string()
    }
}

#[pymodule]
fn cam_regge(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("__version__", cam_core::VERSION)?;
    m.add_class::<PyPole>()?;
    m.add_class::<PyTable>()?;
    m.add_class::<PyPoleModel>()?;
    m.add_class::<PyApproximant>()?;
    m.add_class::<PyRegge>()?;
    m.add_class::<PyCE>()?;
    m.add_class::<PyDecomposition>()?;
    m.add_class::<PyFano>()?;
    m.add_class::<PyMap>()?;
    m.add_function(wrap_pyfunction!(find_poles, m)?)?;
    m.add_function(wrap_pyfunction!(poles_j, m)?)?;
    m.add_function(wrap_pyfunction!(poles_e, m)?)?;
    m.add_function(wrap_pyfunction!(track, m)?)?;
    m.add_function(wrap_pyfunction!(track_ce, m)?)?;
    m.add_function(wrap_pyfunction!(read_trajectories, m)?)?;
    m.add_function(wrap_pyfunction!(write_trajectories, m)?)?;
    m.add_function(wrap_pyfunction!(decompose, m)?)?;
    m.add_function(wrap_pyfunction!(fano_features, m)?)?;
    m.add_function(wrap_pyfunction!(fano_profile, m)?)?;
    m.add_function(wrap_pyfunction!(resonance_term, m)?)?;
    Ok(())
}
