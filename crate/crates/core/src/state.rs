//! Multi-register quantum states, measurements and the distance machinery.
//!
//! Distances use the 1-norm convention throughout: `trace_distance` returns
//! `||rho - sigma||_1` in `[0, 2]`, never the halved value.

use nalgebra::DVector;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::limits::{self, TOL};
use crate::linalg::{self, CMatrix, CVector, ONE, ZERO};

/// Ordered subsystem dimensions with optional register names.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RegisterLayout {
    dims: Vec<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    labels: Option<Vec<String>>,
}

impl RegisterLayout {
    pub fn new(dims: Vec<usize>) -> Result<Self> {
        if dims.iter().any(|&d| d == 0) {
            return Err(Error::InvalidLayout("register dimensions must be positive".into()));
        }
        Ok(Self { dims, labels: None })
    }

    pub fn with_labels(dims: Vec<usize>, labels: Vec<String>) -> Result<Self> {
        let mut l = Self::new(dims)?;
        l.set_labels(labels)?;
        Ok(l)
    }

    /// `n` qubit registers.
    pub fn qubits(n: usize) -> Self {
        Self { dims: vec![2; n], labels: None }
    }

    pub fn set_labels(&mut self, labels: Vec<String>) -> Result<()> {
        if labels.len() != self.dims.len() {
            return Err(Error::InvalidLayout(format!(
                "{} labels for {} registers",
                labels.len(),
                self.dims.len()
            )));
        }
        let mut seen = std::collections::HashSet::new();
        for l in &labels {
            if !seen.insert(l.as_str()) {
                return Err(Error::InvalidLayout(format!("duplicate label `{l}`")));
            }
        }
        self.labels = Some(labels);
        Ok(())
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn labels(&self) -> Option<&[String]> {
        self.labels.as_deref()
    }

    pub fn len(&self) -> usize {
        self.dims.len()
    }

    pub fn is_empty(&self) -> bool {
        self.dims.is_empty()
    }

    /// Ambient dimension (product of register dimensions).
    pub fn dim(&self) -> usize {
        self.dims.iter().product()
    }

    pub fn index_of(&self, label: &str) -> Option<usize> {
        self.labels.as_ref()?.iter().position(|l| l == label)
    }

    pub fn label(&self, i: usize) -> String {
        match &self.labels {
            Some(l) => l[i].clone(),
            None => format!("r{i}"),
        }
    }

    pub fn concat(&self, other: &RegisterLayout) -> RegisterLayout {
        let mut dims = self.dims.clone();
        dims.extend_from_slice(&other.dims);
        let labels = match (&self.labels, &other.labels) {
            (Some(a), Some(b)) => {
                let mut l = a.clone();
                l.extend(b.iter().cloned());
                let mut seen = std::collections::HashSet::new();
                if l.iter().all(|x| seen.insert(x.clone())) {
                    Some(l)
                } else {
                    None
                }
            }
            _ => None,
        };
        RegisterLayout { dims, labels }
    }

    /// Layout restricted to `keep` (ascending order).
    pub fn sub(&self, keep: &[usize]) -> RegisterLayout {
        let mut keep = keep.to_vec();
        keep.sort_unstable();
        RegisterLayout {
            dims: keep.iter().map(|&i| self.dims[i]).collect(),
            labels: self.labels.as_ref().map(|l| keep.iter().map(|&i| l[i].clone()).collect()),
        }
    }

    pub fn reordered(&self, order: &[usize]) -> RegisterLayout {
        RegisterLayout {
            dims: order.iter().map(|&i| self.dims[i]).collect(),
            labels: self.labels.as_ref().map(|l| order.iter().map(|&i| l[i].clone()).collect()),
        }
    }

    fn check_indices(&self, idx: &[usize]) -> Result<()> {
        for &i in idx {
            if i >= self.len() {
                return Err(Error::InvalidArgument(format!(
                    "register index {i} out of range for {} registers",
                    self.len()
                )));
            }
        }
        Ok(())
    }
}

/// Partition of layout indices into parties.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Cut {
    groups: Vec<Vec<usize>>,
}

impl Cut {
    /// Validates that `groups` partition `0..n_registers` into nonempty parts.
    pub fn new(groups: Vec<Vec<usize>>, n_registers: usize) -> Result<Self> {
        if groups.iter().any(|g| g.is_empty()) {
            return Err(Error::InvalidCut("empty party".into()));
        }
        let mut seen = vec![false; n_registers];
        for g in &groups {
            for &i in g {
                if i >= n_registers {
                    return Err(Error::InvalidCut(format!("index {i} out of range")));
                }
                if seen[i] {
                    return Err(Error::InvalidCut(format!("index {i} in two parties")));
                }
                seen[i] = true;
            }
        }
        if seen.iter().any(|s| !s) {
            return Err(Error::InvalidCut("parties do not cover all registers".into()));
        }
        Ok(Self { groups })
    }

    /// One party per register.
    pub fn finest(n_registers: usize) -> Self {
        Self { groups: (0..n_registers).map(|i| vec![i]).collect() }
    }

    /// Registers `0..split` versus `split..n`.
    pub fn bipartite(split: usize, n_registers: usize) -> Result<Self> {
        Self::new(vec![(0..split).collect(), (split..n_registers).collect()], n_registers)
    }

    /// Builds a cut from register labels.
    pub fn from_labels(layout: &RegisterLayout, groups: &[Vec<String>]) -> Result<Self> {
        let mut out = Vec::new();
        for g in groups {
            let mut idx = Vec::new();
            for l in g {
                idx.push(
                    layout
                        .index_of(l)
                        .ok_or_else(|| Error::InvalidCut(format!("unknown register `{l}`")))?,
                );
            }
            out.push(idx);
        }
        Self::new(out, layout.len())
    }

    pub fn groups(&self) -> &[Vec<usize>] {
        &self.groups
    }

    pub fn parties(&self) -> usize {
        self.groups.len()
    }

    pub fn party_dim(&self, layout: &RegisterLayout, party: usize) -> usize {
        self.groups[party].iter().map(|&i| layout.dims()[i]).product()
    }

    pub fn party_dims(&self, layout: &RegisterLayout) -> Vec<usize> {
        (0..self.parties()).map(|p| self.party_dim(layout, p)).collect()
    }

    /// Register order that lists parties contiguously (party 0 first).
    pub fn party_order(&self) -> Vec<usize> {
        self.groups.iter().flatten().copied().collect()
    }

    pub fn check_layout(&self, layout: &RegisterLayout) -> Result<()> {
        let total: usize = self.groups.iter().map(|g| g.len()).sum();
        if total != layout.len() {
            return Err(Error::InvalidCut(format!(
                "cut covers {total} registers, layout has {}",
                layout.len()
            )));
        }
        Ok(())
    }

    pub fn require_parties(&self, min: usize) -> Result<()> {
        if self.parties() < min {
            return Err(Error::InvalidCut(format!(
                "need at least {min} parties, got {}",
                self.parties()
            )));
        }
        Ok(())
    }
}

/// Unit vector on a register layout.
#[derive(Debug, Clone, PartialEq)]
pub struct PureState {
    vector: CVector,
    layout: RegisterLayout,
}

impl PureState {
    pub fn new(vector: CVector, layout: RegisterLayout) -> Result<Self> {
        if vector.len() != layout.dim() {
            return Err(Error::LayoutMismatch(format!(
                "vector length {} vs layout dimension {}",
                vector.len(),
                layout.dim()
            )));
        }
        limits::check_pure_dim("pure state", vector.len())?;
        let n = vector.norm();
        if (n - 1.0).abs() > TOL {
            return Err(Error::InvalidState(format!("norm {n} differs from 1")));
        }
        Ok(Self { vector, layout })
    }

    /// Normalises `vector` before validating.
    pub fn normalized(vector: CVector, layout: RegisterLayout) -> Result<Self> {
        let n = vector.norm();
        if n == 0.0 {
            return Err(Error::InvalidState("zero vector".into()));
        }
        Self::new(vector.unscale(n), layout)
    }

    pub(crate) fn from_parts_unchecked(vector: CVector, layout: RegisterLayout) -> Self {
        Self { vector, layout }
    }

    pub fn basis(layout: RegisterLayout, index: usize) -> Result<Self> {
        let mut v = CVector::zeros(layout.dim());
        if index >= v.len() {
            return Err(Error::InvalidArgument(format!("basis index {index} out of range")));
        }
        v[index] = ONE;
        Self::new(v, layout)
    }

    /// Basis state from per-register digits.
    pub fn basis_digits(layout: RegisterLayout, digits: &[usize]) -> Result<Self> {
        let st = linalg::strides(layout.dims());
        let idx = digits.iter().zip(&st).map(|(d, s)| d * s).sum();
        Self::basis(layout, idx)
    }

    pub fn random<R: Rng + ?Sized>(layout: RegisterLayout, rng: &mut R) -> Self {
        let v = linalg::random_unit_vector(layout.dim(), rng);
        Self { vector: v, layout }
    }

    pub fn vector(&self) -> &CVector {
        &self.vector
    }

    pub fn layout(&self) -> &RegisterLayout {
        &self.layout
    }

    pub fn dim(&self) -> usize {
        self.vector.len()
    }

    pub fn with_layout(&self, layout: RegisterLayout) -> Result<Self> {
        Self::new(self.vector.clone(), layout)
    }

    pub fn tensor(&self, other: &PureState) -> Result<PureState> {
        let layout = self.layout.concat(&other.layout);
        limits::check_pure_dim("pure state", layout.dim())?;
        Ok(Self { vector: linalg::kron_vec(&self.vector, &other.vector), layout })
    }

    /// `<self|other>`.
    pub fn inner(&self, other: &PureState) -> Result<num_complex::Complex64> {
        if self.dim() != other.dim() {
            return Err(Error::LayoutMismatch(format!(
                "dimensions {} and {}",
                self.dim(),
                other.dim()
            )));
        }
        Ok(self.vector.dotc(&other.vector))
    }

    /// `|<self|other>|^2`.
    pub fn overlap(&self, other: &PureState) -> Result<f64> {
        Ok(self.inner(other)?.norm_sqr())
    }

    pub fn to_density(&self) -> Result<DensityMatrix> {
        limits::check_density_dim("density matrix", self.dim())?;
        Ok(DensityMatrix {
            matrix: linalg::projector(&self.vector),
            layout: self.layout.clone(),
        })
    }

    /// Reduced state on `keep` without forming the full projector.
    pub fn reduced(&self, keep: &[usize]) -> Result<DensityMatrix> {
        if keep.is_empty() {
            return Err(Error::InvalidArgument("empty keep set".into()));
        }
        self.layout.check_indices(keep)?;
        let m = linalg::partial_trace_vec(&self.vector, self.layout.dims(), keep);
        limits::check_density_dim("density matrix", m.nrows())?;
        Ok(DensityMatrix { matrix: m, layout: self.layout.sub(keep) })
    }

    /// Reorders registers; new register `j` is old register `order[j]`.
    pub fn permuted(&self, order: &[usize]) -> PureState {
        Self {
            vector: linalg::permute_vec(&self.vector, self.layout.dims(), order),
            layout: self.layout.reordered(order),
        }
    }
}

/// Hermitian, positive semidefinite, unit-trace matrix on a register layout.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix {
    matrix: CMatrix,
    layout: RegisterLayout,
}

impl DensityMatrix {
    pub fn new(matrix: CMatrix, layout: RegisterLayout) -> Result<Self> {
        if matrix.nrows() != matrix.ncols() {
            return Err(Error::InvalidState("matrix is not square".into()));
        }
        if matrix.nrows() != layout.dim() {
            return Err(Error::LayoutMismatch(format!(
                "matrix dimension {} vs layout dimension {}",
                matrix.nrows(),
                layout.dim()
            )));
        }
        limits::check_density_dim("density matrix", matrix.nrows())?;
        let h = linalg::hermitian_deviation(&matrix);
        if h > TOL {
            return Err(Error::InvalidState(format!("not Hermitian (deviation {h:.3e})")));
        }
        let t = matrix.trace();
        if (t.re - 1.0).abs() > TOL || t.im.abs() > TOL {
            return Err(Error::InvalidState(format!("trace {t} differs from 1")));
        }
        let min = linalg::eigvalsh(&matrix).first().copied().unwrap_or(0.0);
        if min < -TOL {
            return Err(Error::InvalidState(format!("negative eigenvalue {min:.3e}")));
        }
        Ok(Self { matrix: linalg::hermitize(&matrix), layout })
    }

    pub(crate) fn from_parts_unchecked(matrix: CMatrix, layout: RegisterLayout) -> Self {
        Self { matrix, layout }
    }

    pub fn maximally_mixed(layout: RegisterLayout) -> Result<Self> {
        let d = layout.dim();
        limits::check_density_dim("density matrix", d)?;
        Ok(Self { matrix: CMatrix::identity(d, d).unscale(d as f64), layout })
    }

    pub fn random<R: Rng + ?Sized>(layout: RegisterLayout, rank: usize, rng: &mut R) -> Self {
        let m = linalg::random_density_matrix(layout.dim(), rank, rng);
        Self { matrix: m, layout }
    }

    /// Convex mixture `sum_i w_i rho_i`; weights must be a probability vector.
    pub fn mixture(items: &[(f64, &DensityMatrix)]) -> Result<Self> {
        let first = items
            .first()
            .ok_or_else(|| Error::InvalidArgument("empty mixture".into()))?
            .1;
        let mut m = CMatrix::zeros(first.dim(), first.dim());
        for (w, r) in items {
            if r.layout.dims() != first.layout.dims() {
                return Err(Error::LayoutMismatch("mixture components differ".into()));
            }
            m += r.matrix.scale(*w);
        }
        Self::new(m, first.layout.clone())
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.matrix
    }

    pub fn layout(&self) -> &RegisterLayout {
        &self.layout
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn with_layout(&self, layout: RegisterLayout) -> Result<Self> {
        if layout.dim() != self.dim() {
            return Err(Error::LayoutMismatch("relabel changes dimension".into()));
        }
        Ok(Self { matrix: self.matrix.clone(), layout })
    }

    pub fn eigenvalues(&self) -> Vec<f64> {
        linalg::eigvalsh(&self.matrix)
    }

    pub fn purity(&self) -> f64 {
        (&self.matrix * &self.matrix).trace().re
    }

    pub fn tensor(&self, other: &DensityMatrix) -> Result<DensityMatrix> {
        let layout = self.layout.concat(&other.layout);
        limits::check_density_dim("density matrix", layout.dim())?;
        Ok(Self { matrix: linalg::kron(&self.matrix, &other.matrix), layout })
    }

    /// Reduced state on `keep`; kept registers stay in layout order.
    pub fn partial_trace(&self, keep: &[usize]) -> Result<DensityMatrix> {
        if keep.is_empty() {
            return Err(Error::InvalidArgument("empty keep set".into()));
        }
        self.layout.check_indices(keep)?;
        let mut k = keep.to_vec();
        k.sort_unstable();
        k.dedup();
        if k.len() == self.layout.len() {
            return Ok(self.clone());
        }
        Ok(Self {
            matrix: linalg::partial_trace(&self.matrix, self.layout.dims(), &k),
            layout: self.layout.sub(&k),
        })
    }

    pub fn permuted(&self, order: &[usize]) -> DensityMatrix {
        Self {
            matrix: linalg::permute_mat(&self.matrix, self.layout.dims(), order),
            layout: self.layout.reordered(order),
        }
    }

    /// `Tr(op * rho)` (real part).
    pub fn expectation(&self, op: &CMatrix) -> f64 {
        (op * &self.matrix).trace().re
    }

    /// `U rho U^dagger` for a unitary or isometry `u` on the whole space.
    pub fn evolve(&self, u: &CMatrix, layout: RegisterLayout) -> Result<DensityMatrix> {
        if u.ncols() != self.dim() || u.nrows() != layout.dim() {
            return Err(Error::LayoutMismatch("operator does not match state".into()));
        }
        Ok(Self { matrix: linalg::hermitize(&(u * &self.matrix * u.adjoint())), layout })
    }
}

/// Either kind of state, for front ends that load states from files.
#[derive(Debug, Clone, PartialEq)]
pub enum AnyState {
    Pure(PureState),
    Density(DensityMatrix),
}

impl AnyState {
    pub fn layout(&self) -> &RegisterLayout {
        match self {
            AnyState::Pure(p) => p.layout(),
            AnyState::Density(d) => d.layout(),
        }
    }

    pub fn to_density(&self) -> Result<DensityMatrix> {
        match self {
            AnyState::Pure(p) => p.to_density(),
            AnyState::Density(d) => Ok(d.clone()),
        }
    }
}

/// Kronecker product of two states of the same kind; mixed kinds are rejected.
pub fn tensor(a: &AnyState, b: &AnyState) -> Result<AnyState> {
    match (a, b) {
        (AnyState::Pure(x), AnyState::Pure(y)) => Ok(AnyState::Pure(x.tensor(y)?)),
        (AnyState::Density(x), AnyState::Density(y)) => Ok(AnyState::Density(x.tensor(y)?)),
        _ => Err(Error::MixedKinds),
    }
}

/// Finite measurement: PSD elements summing to the identity.
#[derive(Debug, Clone, PartialEq)]
pub struct Povm {
    elements: Vec<CMatrix>,
    labels: Vec<String>,
}

impl Povm {
    pub fn new(elements: Vec<CMatrix>, labels: Option<Vec<String>>) -> Result<Self> {
        let d = elements
            .first()
            .ok_or_else(|| Error::InvalidPovm("no elements".into()))?
            .nrows();
        let mut sum = CMatrix::zeros(d, d);
        for (i, e) in elements.iter().enumerate() {
            if e.nrows() != d || e.ncols() != d {
                return Err(Error::InvalidPovm(format!("element {i} has the wrong shape")));
            }
            if linalg::hermitian_deviation(e) > TOL {
                return Err(Error::InvalidPovm(format!("element {i} not Hermitian")));
            }
            let min = linalg::eigvalsh(e).first().copied().unwrap_or(0.0);
            if min < -TOL {
                return Err(Error::InvalidPovm(format!("element {i} not PSD ({min:.3e})")));
            }
            sum += e;
        }
        let dev = linalg::max_abs(&(sum - CMatrix::identity(d, d)));
        if dev > TOL {
            return Err(Error::InvalidPovm(format!("elements sum to identity only within {dev:.3e}")));
        }
        let labels = match labels {
            Some(l) if l.len() == elements.len() => l,
            Some(_) => return Err(Error::InvalidPovm("label count mismatch".into())),
            None => (0..elements.len()).map(|i| i.to_string()).collect(),
        };
        Ok(Self { elements, labels })
    }

    pub(crate) fn from_parts_unchecked(elements: Vec<CMatrix>) -> Self {
        let labels = (0..elements.len()).map(|i| i.to_string()).collect();
        Self { elements, labels }
    }

    /// Projective measurement in the computational basis of dimension `d`.
    pub fn computational(d: usize) -> Self {
        let elements = (0..d)
            .map(|i| {
                let mut m = CMatrix::zeros(d, d);
                m[(i, i)] = ONE;
                m
            })
            .collect();
        Self::from_parts_unchecked(elements)
    }

    /// The trivial measurement `{I}`.
    pub fn trivial(d: usize) -> Self {
        Self::from_parts_unchecked(vec![CMatrix::identity(d, d)])
    }

    /// Two-outcome measurement that ignores the state: each outcome with probability 1/2.
    pub fn coin(d: usize) -> Self {
        let h = CMatrix::identity(d, d).scale(0.5);
        Self::from_parts_unchecked(vec![h.clone(), h])
    }

    pub fn elements(&self) -> &[CMatrix] {
        &self.elements
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn dim(&self) -> usize {
        self.elements[0].nrows()
    }

    pub fn len(&self) -> usize {
        self.elements.len()
    }

    pub fn is_empty(&self) -> bool {
        self.elements.is_empty()
    }

    pub fn probabilities(&self, rho: &DensityMatrix) -> Result<Vec<f64>> {
        if rho.dim() != self.dim() {
            return Err(Error::LayoutMismatch("measurement and state dimensions differ".into()));
        }
        Ok(self.elements.iter().map(|e| rho.expectation(e)).collect())
    }
}

// ---------------------------------------------------------------------------
// distances
// ---------------------------------------------------------------------------

/// Sum of singular values. Hermitian inputs go through the eigensolver,
/// everything else through an SVD.
pub fn trace_norm(x: &CMatrix) -> Result<f64> {
    if x.nrows() != x.ncols() {
        return Err(Error::InvalidArgument("trace norm of a non-square matrix".into()));
    }
    if linalg::hermitian_deviation(x) <= 1e-12 * (1.0 + linalg::max_abs(x)) {
        Ok(linalg::trace_norm_hermitian(x))
    } else {
        Ok(linalg::trace_norm_svd(x))
    }
}

/// `||rho - sigma||_1` together with the optimal projector of the variational form.
#[derive(Debug, Clone)]
pub struct TraceDistance {
    /// Value in `[0, 2]`.
    pub value: f64,
    /// `2 Tr(P (rho - sigma))` for the returned projector; agrees with `value`.
    pub variational: f64,
    /// Projector onto the positive part of `rho - sigma`.
    pub projector: CMatrix,
}

fn same_layout(a: &RegisterLayout, b: &RegisterLayout) -> Result<()> {
    if a.dims() != b.dims() {
        return Err(Error::LayoutMismatch(format!("{:?} vs {:?}", a.dims(), b.dims())));
    }
    Ok(())
}

pub fn trace_distance(rho: &DensityMatrix, sigma: &DensityMatrix) -> Result<TraceDistance> {
    same_layout(rho.layout(), sigma.layout())?;
    let diff = rho.matrix() - sigma.matrix();
    let (vals, vecs) = linalg::eigh(&diff);
    let value = vals.iter().map(|l| l.abs()).sum();
    let projector = linalg::spectral_map(&vals, &vecs, |l| if l > 0.0 { 1.0 } else { 0.0 });
    let variational = 2.0 * (&projector * &diff).trace().re;
    Ok(TraceDistance { value, variational, projector })
}

/// `||rho - sigma||_1` only.
pub fn trace_dist(rho: &DensityMatrix, sigma: &DensityMatrix) -> Result<f64> {
    same_layout(rho.layout(), sigma.layout())?;
    Ok(linalg::trace_norm_hermitian(&(rho.matrix() - sigma.matrix())))
}

/// `F(rho, sigma) = ||sqrt(rho) sqrt(sigma)||_1^2`, in `[0, 1]`.
pub fn fidelity(rho: &DensityMatrix, sigma: &DensityMatrix) -> Result<f64> {
    same_layout(rho.layout(), sigma.layout())?;
    Ok(fidelity_matrices(rho.matrix(), sigma.matrix()))
}

pub(crate) fn fidelity_matrices(rho: &CMatrix, sigma: &CMatrix) -> f64 {
    let s = linalg::trace_norm_svd(&(linalg::sqrt_psd(rho) * linalg::sqrt_psd(sigma)));
    (s * s).clamp(0.0, 1.0)
}

/// Fidelity between a pure state and a density matrix: `<psi|sigma|psi>`.
pub fn fidelity_pure(psi: &PureState, sigma: &DensityMatrix) -> Result<f64> {
    if psi.dim() != sigma.dim() {
        return Err(Error::LayoutMismatch("dimensions differ".into()));
    }
    let v = psi.vector();
    Ok((v.adjoint() * sigma.matrix() * v)[(0, 0)].re.clamp(0.0, 1.0))
}

/// Optimal two-outcome measurement for `rho0` versus `rho1` (equal priors).
///
/// Outcome 0 guesses `rho0`. Returns the measurement and its success
/// probability `1/2 + ||rho0 - rho1||_1 / 4`.
pub fn helstrom(rho0: &DensityMatrix, rho1: &DensityMatrix) -> Result<(Povm, f64)> {
    let td = trace_distance(rho0, rho1)?;
    let d = rho0.dim();
    let p0 = td.projector.clone();
    let p1 = CMatrix::identity(d, d) - &p0;
    let success = 0.5 * rho0.expectation(&p0) + 0.5 * rho1.expectation(&p1);
    let povm = Povm { elements: vec![p0, p1], labels: vec!["0".into(), "1".into()] };
    Ok((povm, success))
}

/// Purification on the state's registers plus a reference `R` of dimension `rank(rho)`.
pub fn purify(rho: &DensityMatrix) -> PureState {
    let (vals, vecs) = linalg::eigh(rho.matrix());
    let kept: Vec<usize> = (0..vals.len()).rev().filter(|&i| vals[i] > 1e-14).collect();
    let r = kept.len().max(1);
    let d = rho.dim();
    let mut v = CVector::zeros(d * r);
    for (j, &i) in kept.iter().enumerate() {
        let s = vals[i].sqrt();
        for a in 0..d {
            v[a * r + j] += vecs[(a, i)] * s;
        }
    }
    let v = linalg::normalize(&v);
    let mut dims = rho.layout().dims().to_vec();
    dims.push(r);
    let labels = rho.layout().labels().map(|l| {
        let mut l = l.to_vec();
        let mut name = "R".to_string();
        while l.contains(&name) {
            name.push('\'');
        }
        l.push(name);
        l
    });
    let layout = RegisterLayout { dims, labels };
    PureState::from_parts_unchecked(v, layout)
}

/// Which two-qubit maximally entangled state to tensor up.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BellKind {
    /// `(|00> + |11>)/sqrt(2)`
    PhiPlus,
    /// `(|01> - |10>)/sqrt(2)`
    Singlet,
}

/// `n` copies of a two-qubit maximally entangled state on layout
/// `A0..A(n-1), B0..B(n-1)`, pair `i` being `(A_i, B_i)`.
pub fn max_entangled(n: usize, kind: BellKind) -> Result<PureState> {
    if n < 1 {
        return Err(Error::InvalidArgument("need at least one pair".into()));
    }
    limits::check_pure_dim("pure state", 1usize << (2 * n).min(63))?;
    let s = std::f64::consts::FRAC_1_SQRT_2;
    let pair = match kind {
        BellKind::PhiPlus => DVector::from_vec(vec![linalg::c(s, 0.0), ZERO, ZERO, linalg::c(s, 0.0)]),
        BellKind::Singlet => DVector::from_vec(vec![ZERO, linalg::c(s, 0.0), linalg::c(-s, 0.0), ZERO]),
    };
    let mut v = CVector::from_element(1, ONE);
    for _ in 0..n {
        v = linalg::kron_vec(&v, &pair);
    }
    // currently ordered A0 B0 A1 B1 ...; regroup to A... B...
    let dims = vec![2; 2 * n];
    let order: Vec<usize> = (0..n).map(|i| 2 * i).chain((0..n).map(|i| 2 * i + 1)).collect();
    let v = linalg::permute_vec(&v, &dims, &order);
    let labels = (0..n).map(|i| format!("A{i}")).chain((0..n).map(|i| format!("B{i}"))).collect();
    let layout = RegisterLayout::with_labels(dims, labels)?;
    PureState::new(v, layout)
}

/// The `A:B` cut for states produced by [`max_entangled`].
pub fn pairs_cut(n: usize) -> Cut {
    Cut { groups: vec![(0..n).collect(), (n..2 * n).collect()] }
}

// ---------------------------------------------------------------------------
// JSON
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
enum Numbers {
    Vector(Vec<f64>),
    Matrix(Vec<Vec<f64>>),
}

/// On-disk state format `{dims, re, im}`: 1-D arrays hold a pure state,
/// 2-D arrays a density matrix.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StateJson {
    pub dims: Vec<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub labels: Option<Vec<String>>,
    re: Numbers,
    im: Numbers,
}

impl StateJson {
    pub fn from_pure(p: &PureState) -> Self {
        Self {
            dims: p.layout().dims().to_vec(),
            labels: p.layout().labels().map(|l| l.to_vec()),
            re: Numbers::Vector(p.vector().iter().map(|z| z.re).collect()),
            im: Numbers::Vector(p.vector().iter().map(|z| z.im).collect()),
        }
    }

    pub fn from_density(d: &DensityMatrix) -> Self {
        let m = d.matrix();
        let rows = |f: fn(&num_complex::Complex64) -> f64| {
            (0..m.nrows()).map(|i| (0..m.ncols()).map(|j| f(&m[(i, j)])).collect()).collect()
        };
        Self {
            dims: d.layout().dims().to_vec(),
            labels: d.layout().labels().map(|l| l.to_vec()),
            re: Numbers::Matrix(rows(|z| z.re)),
            im: Numbers::Matrix(rows(|z| z.im)),
        }
    }

    pub fn from_any(s: &AnyState) -> Self {
        match s {
            AnyState::Pure(p) => Self::from_pure(p),
            AnyState::Density(d) => Self::from_density(d),
        }
    }

    pub fn into_state(self) -> Result<AnyState> {
        let layout = match self.labels {
            Some(l) => RegisterLayout::with_labels(self.dims, l)?,
            None => RegisterLayout::new(self.dims)?,
        };
        match (self.re, self.im) {
            (Numbers::Vector(re), Numbers::Vector(im)) => {
                if re.len() != im.len() {
                    return Err(Error::Serialization("re/im length mismatch".into()));
                }
                let v = CVector::from_iterator(
                    re.len(),
                    re.iter().zip(&im).map(|(a, b)| linalg::c(*a, *b)),
                );
                Ok(AnyState::Pure(PureState::new(v, layout)?))
            }
            (Numbers::Matrix(re), Numbers::Matrix(im)) => {
                let n = re.len();
                if im.len() != n || re.iter().chain(&im).any(|r| r.len() != n) {
                    return Err(Error::Serialization("re/im must be square and equal shape".into()));
                }
                let m = CMatrix::from_fn(n, n, |i, j| linalg::c(re[i][j], im[i][j]));
                Ok(AnyState::Density(DensityMatrix::new(m, layout)?))
            }
            _ => Err(Error::Serialization("re and im must both be vectors or both matrices".into())),
        }
    }
}

pub fn state_to_json(s: &AnyState) -> String {
    serde_json::to_string(&StateJson::from_any(s)).expect("state serialises")
}

pub fn state_from_json(text: &str) -> Result<AnyState> {
    let j: StateJson = serde_json::from_str(text).map_err(|e| Error::Serialization(e.to_string()))?;
    j.into_state()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn ket(bits: &[usize]) -> PureState {
        PureState::basis_digits(RegisterLayout::qubits(bits.len()), bits).unwrap()
    }

    fn plus() -> PureState {
        let s = std::f64::consts::FRAC_1_SQRT_2;
        PureState::new(
            CVector::from_vec(vec![linalg::c(s, 0.0), linalg::c(s, 0.0)]),
            RegisterLayout::qubits(1),
        )
        .unwrap()
    }

    #[test]
    fn tensor_of_basis_kets() {
        let t = ket(&[0]).tensor(&ket(&[1])).unwrap();
        assert_eq!(t.dim(), 4);
        assert_eq!(t.vector()[1], ONE);
    }

    #[test]
    fn tensor_with_maximally_mixed_keeps_unit_trace() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let rho = DensityMatrix::random(RegisterLayout::qubits(2), 2, &mut rng);
        let t = rho.tensor(&DensityMatrix::maximally_mixed(RegisterLayout::new(vec![3]).unwrap()).unwrap()).unwrap();
        assert!((t.matrix().trace().re - 1.0).abs() < 1e-12);
    }

    #[test]
    fn tensor_of_bell_pairs_concatenates_layout() {
        let b = max_entangled(1, BellKind::PhiPlus).unwrap();
        let t = b.tensor(&b).unwrap();
        assert_eq!(t.layout().dims(), &[2, 2, 2, 2]);
    }

    #[test]
    fn tensor_rejects_mixed_kinds() {
        let p = AnyState::Pure(ket(&[0]));
        let d = AnyState::Density(ket(&[0]).to_density().unwrap());
        assert_eq!(tensor(&p, &d), Err(Error::MixedKinds));
    }

    #[test]
    fn marginal_of_bell_is_maximally_mixed() {
        let b = max_entangled(1, BellKind::PhiPlus).unwrap().to_density().unwrap();
        let a = b.partial_trace(&[0]).unwrap();
        let expect = CMatrix::identity(2, 2).scale(0.5);
        assert!(linalg::max_abs(&(a.matrix() - expect)) < 1e-15);
    }

    #[test]
    fn keep_all_is_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let rho = DensityMatrix::random(RegisterLayout::qubits(2), 3, &mut rng);
        assert_eq!(rho.partial_trace(&[0, 1]).unwrap(), rho);
    }

    #[test]
    fn product_marginal() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let rb = DensityMatrix::random(RegisterLayout::new(vec![3]).unwrap(), 2, &mut rng);
        let rho = ket(&[0]).to_density().unwrap().tensor(&rb).unwrap();
        let a = rho.partial_trace(&[0]).unwrap();
        assert!(linalg::max_abs(&(a.matrix() - ket(&[0]).to_density().unwrap().matrix())) < 1e-14);
    }

    #[test]
    fn partial_trace_errors() {
        let rho = ket(&[0, 1]).to_density().unwrap();
        assert!(matches!(rho.partial_trace(&[]), Err(Error::InvalidArgument(_))));
        assert!(matches!(rho.partial_trace(&[2]), Err(Error::InvalidArgument(_))));
    }

    #[test]
    fn trace_norm_examples() {
        let x = CMatrix::from_diagonal(&CVector::from_vec(vec![ONE, -ONE]));
        assert!((trace_norm(&x).unwrap() - 2.0).abs() < 1e-14);
        let z = CMatrix::zeros(3, 3);
        assert_eq!(trace_norm(&z).unwrap(), 0.0);
        let d = ket(&[0]).to_density().unwrap().matrix() - ket(&[1]).to_density().unwrap().matrix();
        assert!((trace_norm(&d).unwrap() - 2.0).abs() < 1e-14);
        assert!(trace_norm(&CMatrix::zeros(2, 3)).is_err());
    }

    #[test]
    fn trace_norm_non_hermitian_uses_svd() {
        // nilpotent |0><1| has singular values (1, 0)
        let mut x = CMatrix::zeros(2, 2);
        x[(0, 1)] = ONE;
        assert!((trace_norm(&x).unwrap() - 1.0).abs() < 1e-14);
    }

    #[test]
    fn trace_distance_zero_and_plus() {
        let r = ket(&[0]).to_density().unwrap();
        let td = trace_distance(&r, &r).unwrap();
        assert!(td.value.abs() < 1e-14);
        let p = plus().to_density().unwrap();
        let td = trace_distance(&r, &p).unwrap();
        assert!((td.value - 2f64.sqrt()).abs() < 1e-12);
        assert!((td.variational - td.value).abs() < 1e-12);
    }

    #[test]
    fn trace_distance_layout_mismatch() {
        let a = ket(&[0]).to_density().unwrap();
        let b = ket(&[0, 0]).to_density().unwrap();
        assert!(matches!(trace_distance(&a, &b), Err(Error::LayoutMismatch(_))));
    }

    #[test]
    fn variational_matches_eigen_sum_on_random_pairs() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..20 {
            let a = DensityMatrix::random(RegisterLayout::qubits(2), 2, &mut rng);
            let b = DensityMatrix::random(RegisterLayout::qubits(2), 3, &mut rng);
            let td = trace_distance(&a, &b).unwrap();
            assert!((td.value - td.variational).abs() < 1e-10);
            // independent SVD path
            let svd = linalg::trace_norm_svd(&(a.matrix() - b.matrix()));
            assert!((td.value - svd).abs() < 1e-10);
        }
    }

    #[test]
    fn fidelity_examples() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let r = DensityMatrix::random(RegisterLayout::qubits(2), 2, &mut rng);
        assert!((fidelity(&r, &r).unwrap() - 1.0).abs() < 1e-9);
        let a = PureState::random(RegisterLayout::qubits(2), &mut rng);
        let b = PureState::random(RegisterLayout::qubits(2), &mut rng);
        let f = fidelity(&a.to_density().unwrap(), &b.to_density().unwrap()).unwrap();
        assert!((f - a.overlap(&b).unwrap()).abs() < 1e-9);
        let phi = max_entangled(1, BellKind::PhiPlus).unwrap().to_density().unwrap();
        let mm = DensityMatrix::maximally_mixed(RegisterLayout::qubits(2)).unwrap();
        // direct evaluation: sqrt(I/4) = I/2, so ||phi * I/2||_1^2 = (1/2)^2
        assert!((fidelity(&phi, &mm).unwrap() - 0.25).abs() < 1e-12);
    }

    #[test]
    fn helstrom_examples() {
        let r = ket(&[0]).to_density().unwrap();
        assert!((helstrom(&r, &r).unwrap().1 - 0.5).abs() < 1e-14);
        let o = ket(&[1]).to_density().unwrap();
        assert!((helstrom(&r, &o).unwrap().1 - 1.0).abs() < 1e-14);
        let p = plus().to_density().unwrap();
        let (povm, s) = helstrom(&r, &p).unwrap();
        assert!((s - (0.5 + 2f64.sqrt() / 4.0)).abs() < 1e-12);
        assert_eq!(povm.len(), 2);
    }

    #[test]
    fn purify_examples() {
        let pure = ket(&[1]).to_density().unwrap();
        let p = purify(&pure);
        assert_eq!(p.layout().dims(), &[2, 1]);
        let mm = DensityMatrix::maximally_mixed(RegisterLayout::qubits(1)).unwrap();
        let p = purify(&mm);
        assert_eq!(p.layout().dims(), &[2, 2]);
        // maximally entangled: both marginals I/2
        let back = p.reduced(&[0]).unwrap();
        assert!(linalg::max_abs(&(back.matrix() - mm.matrix())) < 1e-12);
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let r = DensityMatrix::random(RegisterLayout::qubits(1), 2, &mut rng);
        let p = purify(&r);
        let back = p.reduced(&[0]).unwrap();
        assert!(linalg::max_abs(&(back.matrix() - r.matrix())) < 1e-10);
    }

    #[test]
    fn singlet_vector_and_marginals() {
        let s = max_entangled(1, BellKind::Singlet).unwrap();
        let h = std::f64::consts::FRAC_1_SQRT_2;
        assert!((s.vector()[1].re - h).abs() < 1e-15);
        assert!((s.vector()[2].re + h).abs() < 1e-15);
        let s3 = max_entangled(3, BellKind::PhiPlus).unwrap();
        let a = s3.reduced(&[0, 1, 2]).unwrap();
        let expect = CMatrix::identity(8, 8).unscale(8.0);
        assert!(linalg::max_abs(&(a.matrix() - expect)) < 1e-14);
        assert!(max_entangled(0, BellKind::PhiPlus).is_err());
    }

    #[test]
    fn json_round_trip_is_bit_stable() {
        let mut rng = ChaCha8Rng::seed_from_u64(14);
        let r = AnyState::Density(DensityMatrix::random(RegisterLayout::qubits(2), 2, &mut rng));
        let text = state_to_json(&r);
        let back = state_from_json(&text).unwrap();
        assert_eq!(state_to_json(&back), text);
        let p = AnyState::Pure(PureState::random(RegisterLayout::new(vec![3, 2]).unwrap(), &mut rng));
        let back = state_from_json(&state_to_json(&p)).unwrap();
        assert_eq!(back, p);
    }

    #[test]
    fn density_validation() {
        let bad = CMatrix::identity(2, 2);
        assert!(matches!(
            DensityMatrix::new(bad, RegisterLayout::qubits(1)),
            Err(Error::InvalidState(_))
        ));
        let big = RegisterLayout::qubits(9);
        assert!(matches!(
            DensityMatrix::maximally_mixed(big),
            Err(Error::DimensionCap { .. })
        ));
    }

    #[test]
    fn povm_validation() {
        assert!(Povm::new(vec![CMatrix::identity(2, 2).scale(0.5)], None).is_err());
        assert!(Povm::new(Povm::computational(3).elements().to_vec(), None).is_ok());
    }
}
