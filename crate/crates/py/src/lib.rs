//! Python bindings: states, cuts, circuits, the swap/permutation/product/singlet tests,
//! separability tools and the closed-form bounds.

use num_complex::Complex64;
use pyo3::create_exception;
use pyo3::exceptions::{PyException, PyValueError};
use pyo3::prelude::*;

use septest_core::circuit::Circuit;
use septest_core::locc::{fvg_sep_bound, locc_sep_bound, reduction_beta, singlet_test_analytic_for, singlet_test_mc};
use septest_core::report::report_suite;
use septest_core::separability::{
    bh_bound, choose_k, k_ext_feasible, nearest_pure_product, nearest_separable, ppt_check, Extend, NearestSeparableParams,
    SeesawParams,
};
use septest_core::spectests::{
    permutation_test_circuit_prob, permutation_test_prob, product_test_circuit_prob, product_test_prob, swap_test_prob,
};
use septest_core::state::{max_entangled, state_from_json, state_to_json, AnyState, BellKind};
use septest_core::{linalg::CMatrix, linalg::CVector, limits, RegisterLayout};

create_exception!(septest, SeptestError, PyException, "Raised when a septest computation fails; the message starts with the error code.");

fn err(e: septest_core::Error) -> PyErr {
    SeptestError::new_err(format!("{}: {e}", e.code()))
}

fn layout(dims: Vec<usize>, labels: Option<Vec<String>>) -> PyResult<RegisterLayout> {
    match labels {
        Some(l) => RegisterLayout::with_labels(dims, l),
        None => RegisterLayout::new(dims),
    }
    .map_err(err)
}

fn matrix_from_rows(rows: Vec<Vec<Complex64>>) -> PyResult<CMatrix> {
    let n = rows.len();
    if rows.iter().any(|r| r.len() != n) {
        return Err(PyValueError::new_err("matrix must be square"));
    }
    Ok(CMatrix::from_fn(n, n, |i, j| rows[i][j]))
}

fn rows_from_matrix(m: &CMatrix) -> Vec<Vec<Complex64>> {
    (0..m.nrows()).map(|i| (0..m.ncols()).map(|j| m[(i, j)]).collect()).collect()
}

fn bell(kind: &str) -> PyResult<BellKind> {
    match kind {
        "singlet" => Ok(BellKind::Singlet),
        "phi_plus" => Ok(BellKind::PhiPlus),
        other => Err(PyValueError::new_err(format!("unknown Bell state `{other}`; expected `singlet` or `phi_plus`"))),
    }
}

/// Normalised state vector over a register layout (big-endian).
#[pyclass(module = "septest", frozen, skip_from_py_object)]
#[derive(Clone)]
pub struct PureState(septest_core::PureState);

#[pymethods]
impl PureState {
    #[new]
    #[pyo3(signature = (amplitudes, dims, labels=None, normalize=false))]
    fn new(amplitudes: Vec<Complex64>, dims: Vec<usize>, labels: Option<Vec<String>>, normalize: bool) -> PyResult<Self> {
        let l = layout(dims, labels)?;
        let v = CVector::from_vec(amplitudes);
        let s = if normalize { septest_core::PureState::normalized(v, l) } else { septest_core::PureState::new(v, l) };
        s.map(Self).map_err(err)
    }

    #[staticmethod]
    fn basis(dims: Vec<usize>, index: usize) -> PyResult<Self> {
        septest_core::PureState::basis(layout(dims, None)?, index).map(Self).map_err(err)
    }

    /// `n` copies of `singlet` or `phi_plus` on `A0..A(n-1), B0..B(n-1)`.
    #[staticmethod]
    #[pyo3(signature = (n, kind="singlet"))]
    fn bell_pairs(n: usize, kind: &str) -> PyResult<Self> {
        max_entangled(n, bell(kind)?).map(Self).map_err(err)
    }

    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        match state_from_json(text).map_err(err)? {
            AnyState::Pure(p) => Ok(Self(p)),
            AnyState::Density(_) => Err(PyValueError::new_err("JSON holds a density matrix")),
        }
    }

    fn to_json(&self) -> String {
        state_to_json(&AnyState::Pure(self.0.clone()))
    }

    #[getter]
    fn dims(&self) -> Vec<usize> {
        self.0.layout().dims().to_vec()
    }

    #[getter]
    fn amplitudes(&self) -> Vec<Complex64> {
        self.0.vector().iter().copied().collect()
    }

    fn overlap(&self, other: &PureState) -> PyResult<f64> {
        self.0.overlap(&other.0).map_err(err)
    }

    fn tensor(&self, other: &PureState) -> PyResult<Self> {
        self.0.tensor(&other.0).map(Self).map_err(err)
    }

    fn to_density(&self) -> PyResult<DensityMatrix> {
        self.0.to_density().map(DensityMatrix).map_err(err)
    }

    fn reduced(&self, keep: Vec<usize>) -> PyResult<DensityMatrix> {
        self.0.reduced(&keep).map(DensityMatrix).map_err(err)
    }

    fn __repr__(&self) -> String {
        format!("PureState(dims={:?})", self.0.layout().dims())
    }
}

/// Unit-trace positive semidefinite matrix over a register layout.
#[pyclass(module = "septest", frozen, from_py_object)]
#[derive(Clone)]
pub struct DensityMatrix(septest_core::DensityMatrix);

#[pymethods]
impl DensityMatrix {
    #[new]
    #[pyo3(signature = (rows, dims, labels=None))]
    fn new(rows: Vec<Vec<Complex64>>, dims: Vec<usize>, labels: Option<Vec<String>>) -> PyResult<Self> {
        septest_core::DensityMatrix::new(matrix_from_rows(rows)?, layout(dims, labels)?).map(Self).map_err(err)
    }

    #[staticmethod]
    fn maximally_mixed(dims: Vec<usize>) -> PyResult<Self> {
        septest_core::DensityMatrix::maximally_mixed(layout(dims, None)?).map(Self).map_err(err)
    }

    /// `p |singlet><singlet| + (1 - p) I/4`.
    #[staticmethod]
    fn werner(p: f64) -> PyResult<Self> {
        septest_core::locc::WernerState::new(p).map(|w| Self(w.density())).map_err(err)
    }

    /// Mixture `sum_i w_i rho_i` of states on one layout.
    #[staticmethod]
    fn mixture(weights: Vec<f64>, states: Vec<DensityMatrix>) -> PyResult<Self> {
        if weights.len() != states.len() {
            return Err(PyValueError::new_err("weights and states differ in length"));
        }
        let items: Vec<(f64, &septest_core::DensityMatrix)> = weights.iter().copied().zip(states.iter().map(|s| &s.0)).collect();
        septest_core::DensityMatrix::mixture(&items).map(Self).map_err(err)
    }

    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        state_from_json(text).and_then(|s| s.to_density()).map(Self).map_err(err)
    }

    fn to_json(&self) -> String {
        state_to_json(&AnyState::Density(self.0.clone()))
    }

    #[getter]
    fn dims(&self) -> Vec<usize> {
        self.0.layout().dims().to_vec()
    }

    #[getter]
    fn rows(&self) -> Vec<Vec<Complex64>> {
        rows_from_matrix(self.0.matrix())
    }

    fn eigenvalues(&self) -> Vec<f64> {
        self.0.eigenvalues()
    }

    fn purity(&self) -> f64 {
        self.0.purity()
    }

    fn partial_trace(&self, keep: Vec<usize>) -> PyResult<Self> {
        self.0.partial_trace(&keep).map(Self).map_err(err)
    }

    fn tensor(&self, other: &DensityMatrix) -> PyResult<Self> {
        self.0.tensor(&other.0).map(Self).map_err(err)
    }

    /// `||rho - sigma||_1`, in `[0, 2]`.
    fn trace_distance(&self, other: &DensityMatrix) -> PyResult<f64> {
        septest_core::state::trace_dist(&self.0, &other.0).map_err(err)
    }

    /// Squared fidelity `(Tr |sqrt(rho) sqrt(sigma)|)^2`.
    fn fidelity(&self, other: &DensityMatrix) -> PyResult<f64> {
        septest_core::state::fidelity(&self.0, &other.0).map_err(err)
    }

    fn __repr__(&self) -> String {
        format!("DensityMatrix(dims={:?})", self.0.layout().dims())
    }
}

/// Partition of register indices into parties.
#[pyclass(module = "septest", frozen, skip_from_py_object)]
#[derive(Clone)]
pub struct Cut(septest_core::Cut);

#[pymethods]
impl Cut {
    #[new]
    fn new(groups: Vec<Vec<usize>>, n_registers: usize) -> PyResult<Self> {
        septest_core::Cut::new(groups, n_registers).map(Self).map_err(err)
    }

    /// One party per register.
    #[staticmethod]
    fn finest(n_registers: usize) -> Self {
        Self(septest_core::Cut::finest(n_registers))
    }

    /// `A0..A(n-1) | B0..B(n-1)` for `n` pairs.
    #[staticmethod]
    fn pairs(n: usize) -> Self {
        Self(septest_core::state::pairs_cut(n))
    }

    #[getter]
    fn groups(&self) -> Vec<Vec<usize>> {
        self.0.groups().to_vec()
    }

    fn __repr__(&self) -> String {
        format!("Cut({:?})", self.0.groups())
    }
}

/// Quantum circuit with labelled registers, loaded from its JSON form.
#[pyclass(module = "septest", frozen)]
pub struct QCircuit(Circuit);

#[pymethods]
impl QCircuit {
    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        Circuit::from_json(text).map(Self).map_err(err)
    }

    fn to_json(&self) -> String {
        self.0.to_json()
    }

    #[getter]
    fn input_dims(&self) -> Vec<usize> {
        self.0.input_layout().dims().to_vec()
    }

    #[getter]
    fn output_dims(&self) -> Vec<usize> {
        self.0.output_layout().dims().to_vec()
    }

    fn run_pure(&self, psi: &PureState) -> PyResult<PureState> {
        self.0.run_pure(&psi.0).map(PureState).map_err(err)
    }

    fn run_mixed(&self, rho: &DensityMatrix) -> PyResult<DensityMatrix> {
        self.0.run_mixed(&rho.0).map(DensityMatrix).map_err(err)
    }

    /// Output of a circuit without inputs.
    fn prepare(&self) -> PyResult<DensityMatrix> {
        self.0.prepare().map(DensityMatrix).map_err(err)
    }
}

/// Swap-test acceptance `1/2 + |<psi|phi>|^2 / 2`.
#[pyfunction]
fn swap_test(psi: &PureState, phi: &PureState) -> PyResult<f64> {
    swap_test_prob(&psi.0, &phi.0).map_err(err)
}

/// Weight of `rho` on the symmetric subspace of registers `regs` (all when omitted).
#[pyfunction]
#[pyo3(signature = (rho, regs=None, method="analytic"))]
fn permutation_test(rho: &DensityMatrix, regs: Option<Vec<usize>>, method: &str) -> PyResult<f64> {
    let regs = regs.unwrap_or_else(|| (0..rho.0.layout().len()).collect());
    match method {
        "analytic" => permutation_test_prob(&rho.0, &regs),
        "circuit" => permutation_test_circuit_prob(&rho.0, &regs),
        other => return Err(PyValueError::new_err(format!("unknown method `{other}`"))),
    }
    .map_err(err)
}

/// Product-test acceptance of `psi` across `cut` (one party per register when omitted).
#[pyfunction]
#[pyo3(signature = (psi, cut=None, method="analytic"))]
fn product_test(psi: &PureState, cut: Option<&Cut>, method: &str) -> PyResult<f64> {
    let cut = cut.map_or_else(|| septest_core::Cut::finest(psi.0.layout().len()), |c| c.0.clone());
    match method {
        "analytic" => product_test_prob(&psi.0, &cut),
        "circuit" => product_test_circuit_prob(&psi.0, &cut),
        other => return Err(PyValueError::new_err(format!("unknown method `{other}`"))),
    }
    .map_err(err)
}

/// Exact singlet-test acceptance of a state on `2n` qubits.
#[pyfunction]
#[pyo3(signature = (rho, target="singlet"))]
fn singlet_test(rho: &DensityMatrix, target: &str) -> PyResult<f64> {
    singlet_test_analytic_for(&rho.0, bell(target)?).map_err(err)
}

/// Monte Carlo singlet test: `(frequency, standard_error)`.
#[pyfunction]
#[pyo3(signature = (rho, trials, seed, target="singlet"))]
fn singlet_test_sampled(py: Python<'_>, rho: &DensityMatrix, trials: usize, seed: u64, target: &str) -> PyResult<(f64, Option<f64>)> {
    let kind = bell(target)?;
    let r = py.detach(|| singlet_test_mc(&rho.0, kind, trials, seed)).map_err(err)?;
    Ok((r.outcome.value(), r.outcome.std_error()))
}

/// `(is_ppt, min_eigenvalue)` of the partial transpose on the second party.
#[pyfunction]
fn ppt(rho: &DensityMatrix, cut: &Cut) -> PyResult<(bool, f64)> {
    let r = ppt_check(&rho.0, &cut.0).map_err(err)?;
    Ok((r.ppt, r.min_eigenvalue))
}

/// Seesaw upper bound on the trace distance to the separable set.
/// Returns `(distance, sigma, weights)`.
#[pyfunction]
#[pyo3(signature = (rho, cut, seed=0, restarts=8, iters=300, ensemble_size=None))]
fn nearest_separable_state(
    py: Python<'_>,
    rho: &DensityMatrix,
    cut: &Cut,
    seed: u64,
    restarts: usize,
    iters: usize,
    ensemble_size: Option<usize>,
) -> PyResult<(f64, DensityMatrix, Vec<f64>)> {
    let params = NearestSeparableParams { ensemble_size, restarts, iters, seed };
    let r = py.detach(|| nearest_separable(&rho.0, &cut.0, &params)).map_err(err)?;
    Ok((r.distance, DensityMatrix(r.sigma), r.ensemble.weights))
}

/// Largest overlap `|<psi|a (x) b ...>|^2` found by the seesaw, with the product state.
#[pyfunction]
#[pyo3(signature = (psi, cut, seed=0, restarts=8, iters=200))]
fn nearest_product_state(psi: &PureState, cut: &Cut, seed: u64, restarts: usize, iters: usize) -> PyResult<(f64, PureState)> {
    let r = nearest_pure_product(&psi.0, &cut.0, &SeesawParams { restarts, iters, seed }).map_err(err)?;
    Ok((r.overlap, PureState(r.state)))
}

/// k-extendibility: `(feasible, residual, extension or None)`.
#[pyfunction]
#[pyo3(signature = (rho, cut, k, party=None, iters=2000))]
fn k_extendible(
    py: Python<'_>,
    rho: &DensityMatrix,
    cut: &Cut,
    k: usize,
    party: Option<usize>,
    iters: usize,
) -> PyResult<(bool, f64, Option<DensityMatrix>)> {
    let extend = party.map_or(Extend::AllParties, Extend::Party);
    let r = py.detach(|| k_ext_feasible(&rho.0, &cut.0, k, &extend, iters, None)).map_err(err)?;
    let ext = if r.feasible { r.extension.map(DensityMatrix) } else { None };
    Ok((r.feasible, r.residual, ext))
}

/// `2 (1 - (2/3)^n)`: one-way LOCC distance from `n` singlets to the separable set.
#[pyfunction]
fn locc_bound(n: u32) -> f64 {
    locc_sep_bound(n)
}

/// `2 (1 - 2^{-n/2})`: trace-distance lower bound for `n` singlets.
#[pyfunction]
fn fvg_bound(n: u32) -> f64 {
    fvg_sep_bound(n)
}

/// No-instance distance of the BQP/QMA reductions.
#[pyfunction]
fn beta(n: u32, delta: f64) -> f64 {
    reduction_beta(n, delta)
}

/// de Finetti error bound for `l` parties of dimension `d` with `k` copies.
#[pyfunction]
fn de_finetti_bound(l: usize, d: usize, k: usize) -> PyResult<f64> {
    bh_bound(l, d, k).map_err(err)
}

/// Smallest `k` whose de Finetti bound is below the promise gap.
#[pyfunction]
fn copies_needed(l: usize, d: usize, epsilon: f64, delta: f64) -> PyResult<u64> {
    choose_k(l, d, epsilon, delta).map_err(err)
}

/// Runs a named experiment suite and returns its report as JSON.
#[pyfunction]
fn report(py: Python<'_>, suite: &str, seed: u64) -> PyResult<String> {
    let r = py.detach(|| report_suite(suite, seed)).map_err(err)?;
    Ok(serde_json::to_string(&r).expect("report serialises"))
}

/// Overrides the density-matrix dimension cap for the whole process.
#[pyfunction]
fn set_dim_cap(cap: usize) {
    limits::set_dim_cap_override(cap);
}

#[pymodule]
fn septest(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("SeptestError", m.py().get_type::<SeptestError>())?;
    m.add_class::<PureState>()?;
    m.add_class::<DensityMatrix>()?;
    m.add_class::<Cut>()?;
    m.add_class::<QCircuit>()?;
    for f in [
        wrap_pyfunction!(swap_test, m)?,
        wrap_pyfunction!(permutation_test, m)?,
        wrap_pyfunction!(product_test, m)?,
        wrap_pyfunction!(singlet_test, m)?,
        wrap_pyfunction!(singlet_test_sampled, m)?,
        wrap_pyfunction!(ppt, m)?,
        wrap_pyfunction!(nearest_separable_state, m)?,
        wrap_pyfunction!(nearest_product_state, m)?,
        wrap_pyfunction!(k_extendible, m)?,
        wrap_pyfunction!(locc_bound, m)?,
        wrap_pyfunction!(fvg_bound, m)?,
        wrap_pyfunction!(beta, m)?,
        wrap_pyfunction!(de_finetti_bound, m)?,
        wrap_pyfunction!(copies_needed, m)?,
        wrap_pyfunction!(report, m)?,
        wrap_pyfunction!(set_dim_cap, m)?,
    ] {
        m.add_function(f)?;
    }
    Ok(())
}
