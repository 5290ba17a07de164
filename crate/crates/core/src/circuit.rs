//! Gate-level circuits on named qudit registers.
//!
//! A circuit has input registers, ancillas prepared in `|0>`, a gate list,
//! an ordered output list and a discard set. The mode follows from the
//! declarations: no ancillas and no discards is `unitary`, ancillas without
//! discards is `isometry`, any discard makes it `mixed`.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::error::{CircuitError, Error, Result};
use crate::limits;
use crate::linalg::{self, CMatrix, CVector, ONE, ZERO};
use crate::state::{purify, DensityMatrix, PureState, RegisterLayout};

const UNITARY_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    Unitary,
    Isometry,
    Mixed,
}

impl Mode {
    pub fn as_str(self) -> &'static str {
        match self {
            Mode::Unitary => "unitary",
            Mode::Isometry => "isometry",
            Mode::Mixed => "mixed",
        }
    }
}

/// Condition on a control register.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Predicate {
    /// Register is in basis state `v`.
    Equals(usize),
    /// Register is orthogonal to basis state `v`.
    Orthogonal(usize),
}

impl Predicate {
    fn holds(self, value: usize) -> bool {
        match self {
            Predicate::Equals(v) => value == v,
            Predicate::Orthogonal(v) => value != v,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Control {
    pub label: String,
    pub predicate: Predicate,
}

impl Control {
    pub fn zero(label: &str) -> Self {
        Self { label: label.into(), predicate: Predicate::Equals(0) }
    }

    pub fn nonzero(label: &str) -> Self {
        Self { label: label.into(), predicate: Predicate::Orthogonal(0) }
    }

    pub fn equals(label: &str, v: usize) -> Self {
        Self { label: label.into(), predicate: Predicate::Equals(v) }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum GateKind {
    H,
    X,
    Y,
    Z,
    S,
    T,
    Sdg,
    Tdg,
    /// targets `[control, target]`
    Cnot,
    /// Swaps two registers of equal dimension.
    Swap,
    Qft,
    Iqft,
    /// targets `[perm, r_1, ..., r_k]`: applies permutation number `perm` to the `r_i`.
    Cperm,
    CpermInv,
    /// Raw block on the listed targets (big-endian in listed order).
    Unitary(CMatrix),
}

impl GateKind {
    fn name(&self) -> &'static str {
        match self {
            GateKind::H => "h",
            GateKind::X => "x",
            GateKind::Y => "y",
            GateKind::Z => "z",
            GateKind::S => "s",
            GateKind::T => "t",
            GateKind::Sdg => "sdg",
            GateKind::Tdg => "tdg",
            GateKind::Cnot => "cnot",
            GateKind::Swap => "swap",
            GateKind::Qft => "qft",
            GateKind::Iqft => "iqft",
            GateKind::Cperm => "cperm",
            GateKind::CpermInv => "cperm_inv",
            GateKind::Unitary(_) => "unitary",
        }
    }

    fn inverse(&self) -> GateKind {
        match self {
            GateKind::S => GateKind::Sdg,
            GateKind::Sdg => GateKind::S,
            GateKind::T => GateKind::Tdg,
            GateKind::Tdg => GateKind::T,
            GateKind::Qft => GateKind::Iqft,
            GateKind::Iqft => GateKind::Qft,
            GateKind::Cperm => GateKind::CpermInv,
            GateKind::CpermInv => GateKind::Cperm,
            GateKind::Unitary(u) => GateKind::Unitary(u.adjoint()),
            k => k.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Gate {
    pub kind: GateKind,
    pub targets: Vec<String>,
    pub controls: Vec<Control>,
}

impl Gate {
    pub fn new(kind: GateKind, targets: &[&str]) -> Self {
        Self { kind, targets: targets.iter().map(|s| s.to_string()).collect(), controls: vec![] }
    }

    pub fn h(t: &str) -> Self {
        Self::new(GateKind::H, &[t])
    }

    pub fn x(t: &str) -> Self {
        Self::new(GateKind::X, &[t])
    }

    pub fn cnot(c: &str, t: &str) -> Self {
        Self::new(GateKind::Cnot, &[c, t])
    }

    pub fn swap(a: &str, b: &str) -> Self {
        Self::new(GateKind::Swap, &[a, b])
    }

    pub fn qft(t: &str) -> Self {
        Self::new(GateKind::Qft, &[t])
    }

    pub fn iqft(t: &str) -> Self {
        Self::new(GateKind::Iqft, &[t])
    }

    pub fn unitary(u: CMatrix, targets: &[&str]) -> Self {
        Self::new(GateKind::Unitary(u), targets)
    }

    /// Controlled permutation of `regs` selected by the basis state of `perm_register`.
    pub fn controlled_permutation(perm_register: &str, regs: &[&str]) -> Self {
        let mut t = vec![perm_register];
        t.extend_from_slice(regs);
        Self::new(GateKind::Cperm, &t)
    }

    pub fn controlled(mut self, c: Control) -> Self {
        self.controls.push(c);
        self
    }

    pub fn inverse(&self) -> Gate {
        Gate { kind: self.kind.inverse(), targets: self.targets.clone(), controls: self.controls.clone() }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Register {
    pub label: String,
    pub dim: usize,
}

impl Register {
    pub fn new(label: &str, dim: usize) -> Self {
        Self { label: label.into(), dim }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Circuit {
    inputs: Vec<Register>,
    ancillas: Vec<Register>,
    gates: Vec<Gate>,
    outputs: Vec<String>,
    discard: Vec<String>,
}

/// Permutations of `0..k` in lexicographic order of one-line notation; index 0 is the identity.
pub fn permutations(k: usize) -> Vec<Vec<usize>> {
    let mut cur: Vec<usize> = (0..k).collect();
    let mut out = vec![cur.clone()];
    loop {
        // next lexicographic permutation
        let Some(i) = (1..k).rev().find(|&i| cur[i - 1] < cur[i]) else { break };
        let j = (i..k).rev().find(|&j| cur[j] > cur[i - 1]).unwrap();
        cur.swap(i - 1, j);
        cur[i..].reverse();
        out.push(cur.clone());
    }
    out
}

pub fn factorial(k: usize) -> usize {
    (1..=k).product()
}

/// `omega^{jk} / sqrt(d)`, `omega = exp(2 pi i / d)`.
pub fn qft_matrix(d: usize) -> Result<CMatrix> {
    if d < 1 {
        return Err(CircuitError::DimensionMismatch("qft needs d >= 1".into()).into());
    }
    let s = 1.0 / (d as f64).sqrt();
    Ok(CMatrix::from_fn(d, d, |j, k| {
        let ang = 2.0 * std::f64::consts::PI * ((j * k) % d) as f64 / d as f64;
        linalg::c(ang.cos() * s, ang.sin() * s)
    }))
}

fn named_matrix(kind: &GateKind) -> Option<CMatrix> {
    let h = std::f64::consts::FRAC_1_SQRT_2;
    let m = |a: [num_complex::Complex64; 4]| CMatrix::from_row_slice(2, 2, &a);
    let c = linalg::c;
    Some(match kind {
        GateKind::H => m([c(h, 0.), c(h, 0.), c(h, 0.), c(-h, 0.)]),
        GateKind::X => m([ZERO, ONE, ONE, ZERO]),
        GateKind::Y => m([ZERO, c(0., -1.), c(0., 1.), ZERO]),
        GateKind::Z => m([ONE, ZERO, ZERO, c(-1., 0.)]),
        GateKind::S => m([ONE, ZERO, ZERO, c(0., 1.)]),
        GateKind::Sdg => m([ONE, ZERO, ZERO, c(0., -1.)]),
        GateKind::T => m([ONE, ZERO, ZERO, c(h, h)]),
        GateKind::Tdg => m([ONE, ZERO, ZERO, c(h, -h)]),
        _ => return None,
    })
}

/// Local action of a gate on its (ordered) targets.
enum LocalOp {
    Dense(CMatrix),
    /// `out[map[i]] = in[i]` over the local index space.
    Perm(Vec<usize>),
}

impl Circuit {
    /// Circuit with the given inputs and `|0>`-prepared ancillas; all registers are outputs.
    pub fn new(inputs: Vec<Register>, ancillas: Vec<Register>) -> Result<Self> {
        let mut seen = std::collections::HashSet::new();
        for r in inputs.iter().chain(&ancillas) {
            if r.dim == 0 {
                return Err(CircuitError::Schema(format!("register `{}` has dimension 0", r.label)).into());
            }
            if !seen.insert(r.label.clone()) {
                return Err(CircuitError::Schema(format!("duplicate register `{}`", r.label)).into());
            }
        }
        let outputs = inputs.iter().chain(&ancillas).map(|r| r.label.clone()).collect();
        Ok(Self { inputs, ancillas, gates: vec![], outputs, discard: vec![] })
    }

    /// Unitary-mode circuit on qubit registers with the given labels.
    pub fn on_qubits(labels: &[&str]) -> Self {
        Self::new(labels.iter().map(|l| Register::new(l, 2)).collect(), vec![]).expect("distinct labels")
    }

    pub fn inputs(&self) -> &[Register] {
        &self.inputs
    }

    pub fn ancillas(&self) -> &[Register] {
        &self.ancillas
    }

    pub fn gates(&self) -> &[Gate] {
        &self.gates
    }

    pub fn outputs(&self) -> &[String] {
        &self.outputs
    }

    pub fn discard(&self) -> &[String] {
        &self.discard
    }

    pub fn mode(&self) -> Mode {
        if !self.discard.is_empty() {
            Mode::Mixed
        } else if !self.ancillas.is_empty() {
            Mode::Isometry
        } else {
            Mode::Unitary
        }
    }

    fn registers(&self) -> impl Iterator<Item = &Register> {
        self.inputs.iter().chain(&self.ancillas)
    }

    fn index_map(&self) -> HashMap<&str, usize> {
        self.registers().enumerate().map(|(i, r)| (r.label.as_str(), i)).collect()
    }

    fn work_dims(&self) -> Vec<usize> {
        self.registers().map(|r| r.dim).collect()
    }

    pub fn dim_of(&self, label: &str) -> Option<usize> {
        self.registers().find(|r| r.label == label).map(|r| r.dim)
    }

    pub fn input_layout(&self) -> RegisterLayout {
        RegisterLayout::with_labels(
            self.inputs.iter().map(|r| r.dim).collect(),
            self.inputs.iter().map(|r| r.label.clone()).collect(),
        )
        .expect("validated labels")
    }

    pub fn output_layout(&self) -> RegisterLayout {
        RegisterLayout::with_labels(
            self.outputs.iter().map(|l| self.dim_of(l).unwrap()).collect(),
            self.outputs.clone(),
        )
        .expect("validated labels")
    }

    pub fn input_dim(&self) -> usize {
        self.inputs.iter().map(|r| r.dim).product()
    }

    pub fn add_ancilla(&mut self, r: Register) -> Result<()> {
        if self.dim_of(&r.label).is_some() {
            return Err(CircuitError::Schema(format!("duplicate register `{}`", r.label)).into());
        }
        if r.dim == 0 {
            return Err(CircuitError::Schema(format!("register `{}` has dimension 0", r.label)).into());
        }
        if self.discard.is_empty() || !self.outputs.is_empty() {
            self.outputs.push(r.label.clone());
        }
        self.ancillas.push(r);
        Ok(())
    }

    /// Appends a gate after checking its targets, controls and dimensions.
    pub fn push(&mut self, g: Gate) -> Result<()> {
        self.check_gate(&g)?;
        self.gates.push(g);
        Ok(())
    }

    pub fn extend(&mut self, gates: impl IntoIterator<Item = Gate>) -> Result<()> {
        for g in gates {
            self.push(g)?;
        }
        Ok(())
    }

    /// Sets the ordered outputs; every other register is discarded.
    pub fn set_outputs(&mut self, outputs: &[&str]) -> Result<()> {
        let mut seen = std::collections::HashSet::new();
        for o in outputs {
            if self.dim_of(o).is_none() {
                return Err(CircuitError::UnknownRegister(o.to_string()).into());
            }
            if !seen.insert(*o) {
                return Err(CircuitError::Schema(format!("output `{o}` listed twice")).into());
            }
        }
        self.outputs = outputs.iter().map(|s| s.to_string()).collect();
        self.discard = self
            .registers()
            .filter(|r| !seen.contains(r.label.as_str()))
            .map(|r| r.label.clone())
            .collect();
        Ok(())
    }

    fn check_gate(&self, g: &Gate) -> Result<()> {
        let dims: Vec<usize> = g
            .targets
            .iter()
            .map(|t| self.dim_of(t).ok_or_else(|| Error::from(CircuitError::UnknownRegister(t.clone()))))
            .collect::<Result<_>>()?;
        let mut seen = std::collections::HashSet::new();
        for t in g.targets.iter().chain(g.controls.iter().map(|c| &c.label)) {
            if !seen.insert(t.as_str()) {
                return Err(CircuitError::Schema(format!("register `{t}` used twice in one gate")).into());
            }
        }
        for c in &g.controls {
            let d = self
                .dim_of(&c.label)
                .ok_or_else(|| Error::from(CircuitError::UnknownRegister(c.label.clone())))?;
            let v = match c.predicate {
                Predicate::Equals(v) | Predicate::Orthogonal(v) => v,
            };
            if v >= d {
                return Err(CircuitError::DimensionMismatch(format!(
                    "control value {v} on register `{}` of dimension {d}",
                    c.label
                ))
                .into());
            }
        }
        let mismatch = |m: String| Error::from(CircuitError::DimensionMismatch(m));
        match &g.kind {
            k @ (GateKind::H | GateKind::X | GateKind::Y | GateKind::Z | GateKind::S | GateKind::T | GateKind::Sdg | GateKind::Tdg) => {
                if dims != [2] {
                    return Err(mismatch(format!("`{}` acts on one qubit", k.name())));
                }
            }
            GateKind::Cnot => {
                if dims != [2, 2] {
                    return Err(mismatch("cnot acts on two qubits".into()));
                }
            }
            GateKind::Swap => {
                if dims.len() != 2 || dims[0] != dims[1] {
                    return Err(mismatch("swap needs two registers of equal dimension".into()));
                }
            }
            GateKind::Qft | GateKind::Iqft => {
                if dims.len() != 1 {
                    return Err(mismatch("qft acts on one register".into()));
                }
            }
            GateKind::Cperm | GateKind::CpermInv => {
                if dims.len() < 2 {
                    return Err(mismatch("cperm needs a permutation register and targets".into()));
                }
                let k = dims.len() - 1;
                if dims[1..].iter().any(|&d| d != dims[1]) {
                    return Err(mismatch("permuted registers must share a dimension".into()));
                }
                if dims[0] < factorial(k) {
                    return Err(mismatch(format!(
                        "permutation register dimension {} below {k}! = {}",
                        dims[0],
                        factorial(k)
                    )));
                }
            }
            GateKind::Unitary(u) => {
                let d: usize = dims.iter().product();
                if u.nrows() != d || u.ncols() != d {
                    return Err(mismatch(format!("raw block is {}x{}, targets span {d}", u.nrows(), u.ncols())));
                }
                let dev = linalg::unitary_deviation(u);
                if dev > UNITARY_TOL {
                    return Err(CircuitError::NotUnitary(dev).into());
                }
            }
        }
        Ok(())
    }

    fn local_op(&self, g: &Gate) -> Result<LocalOp> {
        if let Some(m) = named_matrix(&g.kind) {
            return Ok(LocalOp::Dense(m));
        }
        let dims: Vec<usize> = g.targets.iter().map(|t| self.dim_of(t).unwrap()).collect();
        Ok(match &g.kind {
            GateKind::Cnot => LocalOp::Perm(vec![0, 1, 3, 2]),
            GateKind::Swap => {
                let d = dims[0];
                LocalOp::Perm((0..d * d).map(|i| (i % d) * d + i / d).collect())
            }
            GateKind::Qft => LocalOp::Dense(qft_matrix(dims[0])?),
            GateKind::Iqft => LocalOp::Dense(qft_matrix(dims[0])?.adjoint()),
            GateKind::Cperm | GateKind::CpermInv => {
                let k = dims.len() - 1;
                let perms = permutations(k);
                let local: Vec<usize> = dims.clone();
                let total: usize = local.iter().product();
                let st = linalg::strides(&local);
                let inverse = matches!(g.kind, GateKind::CpermInv);
                let mut map = vec![0; total];
                for (i, m) in map.iter_mut().enumerate() {
                    let dg = linalg::digits(i, &local);
                    let p = dg[0];
                    if p >= perms.len() {
                        *m = i;
                        continue;
                    }
                    let pi = &perms[p];
                    // content of register j moves to register pi[j]
                    let mut out = dg.clone();
                    for j in 0..k {
                        if inverse {
                            out[1 + j] = dg[1 + pi[j]];
                        } else {
                            out[1 + pi[j]] = dg[1 + j];
                        }
                    }
                    *m = out.iter().zip(&st).map(|(a, b)| a * b).sum();
                }
                LocalOp::Perm(map)
            }
            GateKind::Unitary(u) => LocalOp::Dense(u.clone()),
            _ => unreachable!("named gates handled above"),
        })
    }

    fn apply_gates(&self, v: &mut CVector) -> Result<()> {
        let dims = self.work_dims();
        let idx = self.index_map();
        let st = linalg::strides(&dims);
        for g in &self.gates {
            let targets: Vec<usize> = g.targets.iter().map(|t| idx[t.as_str()]).collect();
            let ctrl: Vec<(usize, usize, Predicate)> = g
                .controls
                .iter()
                .map(|c| {
                    let i = idx[c.label.as_str()];
                    (st[i], dims[i], c.predicate)
                })
                .collect();
            let active = |r: usize| ctrl.iter().all(|&(s, d, p)| p.holds((r / s) % d));
            match self.local_op(g)? {
                LocalOp::Dense(u) => linalg::apply_local_vec_filtered(v, &dims, &targets, &u, active),
                LocalOp::Perm(map) => {
                    let rest = linalg::complement(dims.len(), &targets);
                    let ot = linalg::subsystem_offsets(&dims, &targets);
                    let or = linalg::subsystem_offsets(&dims, &rest);
                    let mut buf = vec![ZERO; ot.len()];
                    for &r in &or {
                        if !active(r) {
                            continue;
                        }
                        for (k, &o) in ot.iter().enumerate() {
                            buf[k] = v[r + o];
                        }
                        for (k, &m) in map.iter().enumerate() {
                            v[r + ot[m]] = buf[k];
                        }
                    }
                }
            }
        }
        Ok(())
    }

    /// Runs the gates on an input vector and returns the full working-register vector
    /// (inputs then ancillas, declaration order).
    pub fn run_full(&self, input: &CVector) -> Result<CVector> {
        if input.len() != self.input_dim() {
            return Err(Error::LayoutMismatch(format!(
                "input dimension {} vs circuit input dimension {}",
                input.len(),
                self.input_dim()
            )));
        }
        let work: usize = self.work_dims().iter().product();
        limits::check_pure_dim("circuit register space", work)?;
        let anc: usize = self.ancillas.iter().map(|r| r.dim).product();
        let mut v = CVector::zeros(work);
        for (i, z) in input.iter().enumerate() {
            v[i * anc] = *z;
        }
        self.apply_gates(&mut v)?;
        Ok(v)
    }

    fn output_order(&self) -> Vec<usize> {
        let idx = self.index_map();
        self.outputs.iter().map(|o| idx[o.as_str()]).collect()
    }

    fn check_input_layout(&self, layout: &RegisterLayout) -> Result<()> {
        let want: Vec<usize> = self.inputs.iter().map(|r| r.dim).collect();
        if layout.dims() != want.as_slice() {
            return Err(Error::LayoutMismatch(format!(
                "input layout {:?} vs circuit inputs {:?}",
                layout.dims(),
                want
            )));
        }
        Ok(())
    }

    /// Pure-state execution; unitary and isometry modes only.
    pub fn run_pure(&self, input: &PureState) -> Result<PureState> {
        if self.mode() == Mode::Mixed {
            return Err(CircuitError::WrongMode("mixed").into());
        }
        self.check_input_layout(input.layout())?;
        let v = self.run_full(input.vector())?;
        let v = linalg::permute_vec(&v, &self.work_dims(), &self.output_order());
        Ok(PureState::from_parts_unchecked(v, self.output_layout()))
    }

    /// Density-matrix execution in any mode; discarded registers are traced out.
    pub fn run_mixed(&self, input: &DensityMatrix) -> Result<DensityMatrix> {
        self.check_input_layout(input.layout())?;
        let out_layout = self.output_layout();
        limits::check_density_dim("circuit output", out_layout.dim())?;
        let dims = self.work_dims();
        let idx = self.index_map();
        let keep: Vec<usize> = {
            let mut k: Vec<usize> = self.outputs.iter().map(|o| idx[o.as_str()]).collect();
            k.sort_unstable();
            k
        };
        let (vals, vecs) = linalg::eigh(input.matrix());
        let mut acc = CMatrix::zeros(out_layout.dim(), out_layout.dim());
        for (j, &l) in vals.iter().enumerate() {
            if l <= 1e-15 {
                continue;
            }
            let v = self.run_full(&vecs.column(j).into_owned())?;
            acc += linalg::partial_trace_vec(&v, &dims, &keep).scale(l);
        }
        // kept registers come out in ascending working order; reorder to `outputs`
        let sorted_dims: Vec<usize> = keep.iter().map(|&i| dims[i]).collect();
        let order: Vec<usize> = self
            .outputs
            .iter()
            .map(|o| keep.iter().position(|&k| k == idx[o.as_str()]).unwrap())
            .collect();
        let m = linalg::permute_mat(&acc, &sorted_dims, &order);
        let t = m.trace().re;
        Ok(DensityMatrix::from_parts_unchecked(linalg::hermitize(&m.unscale(t)), out_layout))
    }

    /// Probability that measuring the listed registers right after the gates gives the
    /// listed basis values.
    pub fn outcome_probability(&self, input: &DensityMatrix, outcome: &[(&str, usize)]) -> Result<f64> {
        self.check_input_layout(input.layout())?;
        let dims = self.work_dims();
        let idx = self.index_map();
        let st = linalg::strides(&dims);
        let mut want = Vec::new();
        for (l, v) in outcome {
            let i = *idx.get(l).ok_or_else(|| Error::from(CircuitError::UnknownRegister(l.to_string())))?;
            want.push((st[i], dims[i], *v));
        }
        let (vals, vecs) = linalg::eigh(input.matrix());
        let mut p = 0.0;
        for (j, &l) in vals.iter().enumerate() {
            if l <= 1e-15 {
                continue;
            }
            let v = self.run_full(&vecs.column(j).into_owned())?;
            let w: f64 = v
                .iter()
                .enumerate()
                .filter(|(i, _)| want.iter().all(|&(s, d, x)| (i / s) % d == x))
                .map(|(_, z)| z.norm_sqr())
                .sum();
            p += l * w;
        }
        Ok(p.clamp(0.0, 1.0))
    }

    /// Output state of a circuit with no inputs.
    pub fn prepare(&self) -> Result<DensityMatrix> {
        let input = DensityMatrix::from_parts_unchecked(
            CMatrix::identity(1, 1),
            RegisterLayout::new(self.inputs.iter().map(|r| r.dim).collect())?,
        );
        self.run_mixed(&input)
    }

    /// Matrix of the induced linear map (output dimension x input dimension); no discards allowed.
    pub fn matrix(&self) -> Result<CMatrix> {
        if self.mode() == Mode::Mixed {
            return Err(CircuitError::WrongMode("mixed").into());
        }
        let din = self.input_dim();
        let dims = self.work_dims();
        let dout: usize = dims.iter().product();
        limits::check_density_dim("circuit matrix", dout.max(din))?;
        let order = self.output_order();
        let mut m = CMatrix::zeros(dout, din);
        for j in 0..din {
            let mut e = CVector::zeros(din);
            e[j] = ONE;
            let v = linalg::permute_vec(&self.run_full(&e)?, &dims, &order);
            m.set_column(j, &v);
        }
        Ok(m)
    }

    /// Checks `V^dagger V = I` on the induced map.
    pub fn check_isometry(&self) -> Result<f64> {
        let dev = linalg::isometry_deviation(&self.matrix()?);
        if dev > UNITARY_TOL {
            return Err(CircuitError::NotIsometric(dev).into());
        }
        Ok(dev)
    }

    /// Reversed circuit with inverted gates; unitary mode only.
    pub fn inverse(&self) -> Result<Circuit> {
        if self.mode() != Mode::Unitary {
            return Err(CircuitError::WrongMode(self.mode().as_str()).into());
        }
        let mut c = self.clone();
        c.gates = self.gates.iter().rev().map(Gate::inverse).collect();
        Ok(c)
    }

    /// Renames every register with `f`.
    pub fn relabeled(&self, f: impl Fn(&str) -> String) -> Circuit {
        let reg = |r: &Register| Register { label: f(&r.label), dim: r.dim };
        Circuit {
            inputs: self.inputs.iter().map(reg).collect(),
            ancillas: self.ancillas.iter().map(reg).collect(),
            gates: self
                .gates
                .iter()
                .map(|g| Gate {
                    kind: g.kind.clone(),
                    targets: g.targets.iter().map(|t| f(t)).collect(),
                    controls: g
                        .controls
                        .iter()
                        .map(|c| Control { label: f(&c.label), predicate: c.predicate })
                        .collect(),
                })
                .collect(),
            outputs: self.outputs.iter().map(|o| f(o)).collect(),
            discard: self.discard.iter().map(|o| f(o)).collect(),
        }
    }

    /// Mixed-mode circuit with no inputs whose output is `rho`, built from a purification.
    ///
    /// The output registers carry `labels`; a reference register `garbage` holds the
    /// purifying system and is discarded (omitted when `rho` is pure).
    pub fn preparing(rho: &DensityMatrix, labels: &[&str], garbage: &str) -> Result<Circuit> {
        let dims = rho.layout().dims();
        if labels.len() != dims.len() {
            return Err(Error::LayoutMismatch("one label per register".into()));
        }
        let psi = purify(rho);
        let r = *psi.layout().dims().last().unwrap();
        let mut regs: Vec<Register> = labels.iter().zip(dims).map(|(l, &d)| Register::new(l, d)).collect();
        if r > 1 {
            regs.push(Register::new(garbage, r));
        }
        let mut c = Circuit::new(vec![], regs.clone())?;
        let u = linalg::unitary_with_first_column(psi.vector());
        let targets: Vec<&str> = regs.iter().map(|r| r.label.as_str()).collect();
        c.push(Gate::unitary(u, &targets))?;
        c.set_outputs(labels)?;
        Ok(c)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&CircuitJson::from(self)).expect("circuit serialises")
    }

    pub fn from_json(text: &str) -> Result<Circuit> {
        let j: CircuitJson =
            serde_json::from_str(text).map_err(|e| Error::from(CircuitError::Schema(e.to_string())))?;
        j.try_into()
    }
}

/// Parses a circuit file; see [`CircuitJson`] for the schema.
pub fn parse_circuit(text: &str) -> Result<Circuit> {
    Circuit::from_json(text)
}

// ---------------------------------------------------------------------------
// JSON schema
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AncillaJson {
    pub label: String,
    pub dim: usize,
    #[serde(default = "zero_prep")]
    pub prep: String,
}

fn zero_prep() -> String {
    "zero".into()
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ControlJson {
    pub label: String,
    /// `zero`, `nonzero`, `equals` or `orthogonal`.
    pub predicate: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub value: Option<usize>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MatrixJson {
    pub re: Vec<Vec<f64>>,
    pub im: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GateJson {
    pub kind: String,
    pub targets: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub control: Option<ControlJson>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub controls: Vec<ControlJson>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub matrix: Option<MatrixJson>,
}

/// `{inputs, ancillas, gates, outputs, discard}`.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CircuitJson {
    #[serde(default)]
    pub inputs: Vec<Register>,
    #[serde(default)]
    pub ancillas: Vec<AncillaJson>,
    #[serde(default)]
    pub gates: Vec<GateJson>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub outputs: Option<Vec<String>>,
    #[serde(default)]
    pub discard: Vec<String>,
}

fn control_to_json(c: &Control) -> ControlJson {
    let (predicate, value) = match c.predicate {
        Predicate::Equals(0) => ("zero", None),
        Predicate::Orthogonal(0) => ("nonzero", None),
        Predicate::Equals(v) => ("equals", Some(v)),
        Predicate::Orthogonal(v) => ("orthogonal", Some(v)),
    };
    ControlJson { label: c.label.clone(), predicate: predicate.into(), value }
}

fn control_from_json(c: &ControlJson) -> Result<Control> {
    let schema = |m: String| Error::from(CircuitError::Schema(m));
    let predicate = match (c.predicate.as_str(), c.value) {
        ("zero", None) => Predicate::Equals(0),
        ("nonzero", None) => Predicate::Orthogonal(0),
        ("equals", Some(v)) => Predicate::Equals(v),
        ("orthogonal", Some(v)) => Predicate::Orthogonal(v),
        (p, _) => return Err(schema(format!("bad control predicate `{p}`"))),
    };
    Ok(Control { label: c.label.clone(), predicate })
}

impl From<&Circuit> for CircuitJson {
    fn from(c: &Circuit) -> Self {
        let gates = c
            .gates
            .iter()
            .map(|g| {
                let matrix = match &g.kind {
                    GateKind::Unitary(u) => Some(MatrixJson {
                        re: (0..u.nrows()).map(|i| (0..u.ncols()).map(|j| u[(i, j)].re).collect()).collect(),
                        im: (0..u.nrows()).map(|i| (0..u.ncols()).map(|j| u[(i, j)].im).collect()).collect(),
                    }),
                    _ => None,
                };
                let (control, controls) = if g.controls.len() == 1 {
                    (Some(control_to_json(&g.controls[0])), vec![])
                } else {
                    (None, g.controls.iter().map(control_to_json).collect())
                };
                GateJson { kind: g.kind.name().into(), targets: g.targets.clone(), control, controls, matrix }
            })
            .collect();
        CircuitJson {
            inputs: c.inputs.clone(),
            ancillas: c
                .ancillas
                .iter()
                .map(|r| AncillaJson { label: r.label.clone(), dim: r.dim, prep: zero_prep() })
                .collect(),
            gates,
            outputs: Some(c.outputs.clone()),
            discard: c.discard.clone(),
        }
    }
}

impl TryFrom<CircuitJson> for Circuit {
    type Error = Error;

    fn try_from(j: CircuitJson) -> Result<Circuit> {
        let schema = |m: String| Error::from(CircuitError::Schema(m));
        for a in &j.ancillas {
            if a.prep != "zero" {
                return Err(schema(format!("ancilla `{}` has unsupported prep `{}`", a.label, a.prep)));
            }
        }
        let mut c = Circuit::new(
            j.inputs,
            j.ancillas.iter().map(|a| Register::new(&a.label, a.dim)).collect(),
        )?;
        for g in &j.gates {
            let kind = match g.kind.as_str() {
                "h" => GateKind::H,
                "x" => GateKind::X,
                "y" => GateKind::Y,
                "z" => GateKind::Z,
                "s" => GateKind::S,
                "t" => GateKind::T,
                "sdg" => GateKind::Sdg,
                "tdg" => GateKind::Tdg,
                "cnot" => GateKind::Cnot,
                "swap" | "cswap" => GateKind::Swap,
                "qft" => GateKind::Qft,
                "iqft" => GateKind::Iqft,
                "cperm" => GateKind::Cperm,
                "cperm_inv" => GateKind::CpermInv,
                "unitary" => {
                    let m = g.matrix.as_ref().ok_or_else(|| schema("unitary gate without matrix".into()))?;
                    let n = m.re.len();
                    if m.im.len() != n || m.re.iter().chain(&m.im).any(|r| r.len() != n) {
                        return Err(schema("unitary matrix must be square with matching re/im".into()));
                    }
                    GateKind::Unitary(CMatrix::from_fn(n, n, |a, b| linalg::c(m.re[a][b], m.im[a][b])))
                }
                other => return Err(CircuitError::UnknownGateKind(other.into()).into()),
            };
            if g.kind == "cswap" && g.control.is_none() && g.controls.is_empty() {
                return Err(schema("cswap needs a control".into()));
            }
            if g.matrix.is_some() && !matches!(kind, GateKind::Unitary(_)) {
                return Err(schema(format!("`{}` gate does not take a matrix", g.kind)));
            }
            let mut controls: Vec<Control> = g.controls.iter().map(control_from_json).collect::<Result<_>>()?;
            if let Some(cj) = &g.control {
                controls.insert(0, control_from_json(cj)?);
            }
            c.push(Gate { kind, targets: g.targets.clone(), controls })?;
        }
        match (&j.outputs, j.discard.is_empty()) {
            (Some(o), _) => {
                let o: Vec<&str> = o.iter().map(|s| s.as_str()).collect();
                c.set_outputs(&o)?;
                let mut want = j.discard.clone();
                let mut got = c.discard.clone();
                want.sort();
                got.sort();
                if want != got {
                    return Err(schema("outputs and discard must partition the registers".into()));
                }
            }
            (None, true) => {}
            (None, false) => {
                for d in &j.discard {
                    if c.dim_of(d).is_none() {
                        return Err(CircuitError::UnknownRegister(d.clone()).into());
                    }
                }
                let keep: Vec<String> =
                    c.registers().map(|r| r.label.clone()).filter(|l| !j.discard.contains(l)).collect();
                let keep: Vec<&str> = keep.iter().map(|s| s.as_str()).collect();
                c.set_outputs(&keep)?;
            }
        }
        Ok(c)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::state::{max_entangled, BellKind};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn bell_prep() -> Circuit {
        let mut c = Circuit::on_qubits(&["A", "B"]);
        c.push(Gate::h("A")).unwrap();
        c.push(Gate::cnot("A", "B")).unwrap();
        c
    }

    fn zero2() -> PureState {
        PureState::basis(RegisterLayout::qubits(2), 0).unwrap()
    }

    #[test]
    fn empty_circuit_is_identity() {
        let c = Circuit::on_qubits(&["A", "B"]);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let p = PureState::random(RegisterLayout::qubits(2), &mut rng);
        assert!((c.run_pure(&p).unwrap().vector() - p.vector()).norm() < 1e-15);
    }

    #[test]
    fn hadamard_on_zero() {
        let mut c = Circuit::on_qubits(&["A"]);
        c.push(Gate::h("A")).unwrap();
        let out = c.run_pure(&PureState::basis(RegisterLayout::qubits(1), 0).unwrap()).unwrap();
        let h = std::f64::consts::FRAC_1_SQRT_2;
        assert!((out.vector()[0].re - h).abs() < 1e-15 && (out.vector()[1].re - h).abs() < 1e-15);
    }

    #[test]
    fn bell_prep_gives_phi_plus() {
        let out = bell_prep().run_pure(&zero2()).unwrap();
        let phi = max_entangled(1, BellKind::PhiPlus).unwrap();
        assert!((out.overlap(&phi).unwrap() - 1.0).abs() < 1e-14);
    }

    #[test]
    fn bell_prep_then_discard_is_maximally_mixed() {
        let mut c = bell_prep();
        c.set_outputs(&["A"]).unwrap();
        assert_eq!(c.mode(), Mode::Mixed);
        let out = c.run_mixed(&zero2().to_density().unwrap()).unwrap();
        assert!(linalg::max_abs(&(out.matrix() - CMatrix::identity(2, 2).scale(0.5))) < 1e-14);
    }

    #[test]
    fn mixed_run_without_discard_matches_pure_run() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let p = PureState::random(RegisterLayout::qubits(2), &mut rng);
        let c = bell_prep();
        let a = c.run_mixed(&p.to_density().unwrap()).unwrap();
        let b = c.run_pure(&p).unwrap().to_density().unwrap();
        assert!(linalg::max_abs(&(a.matrix() - b.matrix())) < 1e-10);
    }

    #[test]
    fn run_pure_rejects_mixed_mode() {
        let mut c = bell_prep();
        c.set_outputs(&["A"]).unwrap();
        assert!(matches!(c.run_pure(&zero2()), Err(Error::Circuit(CircuitError::WrongMode(_)))));
    }

    #[test]
    fn cperm_two_registers() {
        let mut c = Circuit::new(
            vec![Register::new("P", 2), Register::new("A", 2), Register::new("B", 2)],
            vec![],
        )
        .unwrap();
        c.push(Gate::controlled_permutation("P", &["A", "B"])).unwrap();
        let m = c.matrix().unwrap();
        // P=0 block identity, P=1 block SWAP
        let swap = [0usize, 2, 1, 3];
        for i in 0..4 {
            assert_eq!(m[(i, i)], ONE);
            assert_eq!(m[(4 + swap[i], 4 + i)], ONE);
        }
    }

    #[test]
    fn cycles_compose() {
        let p = permutations(3);
        assert_eq!(p.len(), 6);
        assert_eq!(p[0], vec![0, 1, 2]);
        let c123 = p.iter().position(|x| x == &vec![1, 2, 0]).unwrap();
        let c132 = p.iter().position(|x| x == &vec![2, 0, 1]).unwrap();
        let single = |idx: usize| {
            let mut c = Circuit::new(
                vec![Register::new("P", 6), Register::new("A", 2), Register::new("B", 2), Register::new("C", 2)],
                vec![],
            )
            .unwrap();
            c.push(Gate::controlled_permutation("P", &["A", "B", "C"])).unwrap();
            let m = c.matrix().unwrap();
            m.view((idx * 8, idx * 8), (8, 8)).into_owned()
        };
        let w = single(c123);
        assert!(linalg::max_abs(&(&w * &w - single(c132))) < 1e-15);
    }

    #[test]
    fn cperm_dimension_mismatch() {
        let mut c = Circuit::new(
            vec![Register::new("P", 2), Register::new("A", 2), Register::new("B", 3)],
            vec![],
        )
        .unwrap();
        let e = c.push(Gate::controlled_permutation("P", &["A", "B"])).unwrap_err();
        assert_eq!(e.code(), "DimensionMismatch");
    }

    #[test]
    fn qft_examples() {
        let h = qft_matrix(2).unwrap();
        assert!(linalg::max_abs(&(h - named_matrix(&GateKind::H).unwrap())) < 1e-15);
        let f = qft_matrix(5).unwrap();
        assert!(linalg::max_abs(&(&f * f.adjoint() - CMatrix::identity(5, 5))) < 1e-12);
        let f6 = qft_matrix(6).unwrap();
        for j in 0..6 {
            assert!((f6[(j, 0)].re - 1.0 / 6f64.sqrt()).abs() < 1e-15);
        }
        assert!(qft_matrix(0).is_err());
    }

    #[test]
    fn parse_bell_prep() {
        let text = r#"{"inputs":[{"label":"A","dim":2},{"label":"B","dim":2}],
            "gates":[{"kind":"h","targets":["A"]},{"kind":"cnot","targets":["A","B"]}]}"#;
        let c = parse_circuit(text).unwrap();
        assert_eq!(c.gates().len(), 2);
        assert_eq!(c.mode(), Mode::Unitary);
    }

    #[test]
    fn parse_discard_is_mixed() {
        let text = r#"{"ancillas":[{"label":"A","dim":2,"prep":"zero"},{"label":"B","dim":2,"prep":"zero"}],
            "gates":[{"kind":"h","targets":["A"]},{"kind":"cnot","targets":["A","B"]}],
            "discard":["B"]}"#;
        let c = parse_circuit(text).unwrap();
        assert_eq!(c.mode(), Mode::Mixed);
        assert_eq!(c.outputs(), &["A".to_string()]);
    }

    #[test]
    fn parse_errors_have_codes() {
        let bad = r#"{"inputs":[{"label":"A","dim":2}],"gates":[{"kind":"unitary","targets":["A"],
            "matrix":{"re":[[1,1],[0,1]],"im":[[0,0],[0,0]]}}]}"#;
        assert_eq!(parse_circuit(bad).unwrap_err().code(), "NotUnitary");
        let unk = r#"{"inputs":[{"label":"A","dim":2}],"gates":[{"kind":"toffoli","targets":["A"]}]}"#;
        assert_eq!(parse_circuit(unk).unwrap_err().code(), "UnknownGateKind");
        assert_eq!(parse_circuit("{\"inputs\": 3}").unwrap_err().code(), "Schema");
        let reg = r#"{"inputs":[{"label":"A","dim":2}],"gates":[{"kind":"h","targets":["Q"]}]}"#;
        assert_eq!(parse_circuit(reg).unwrap_err().code(), "UnknownRegister");
    }

    #[test]
    fn json_round_trip() {
        let mut c = Circuit::new(
            vec![Register::new("P", 2), Register::new("A", 2)],
            vec![Register::new("W", 2), Register::new("G", 3)],
        )
        .unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        c.push(Gate::h("W")).unwrap();
        c.push(Gate::swap("P", "A").controlled(Control::nonzero("W"))).unwrap();
        c.push(Gate::unitary(linalg::random_unitary(3, &mut rng), &["G"]).controlled(Control::equals("W", 1)))
            .unwrap();
        c.push(Gate::qft("G").controlled(Control::zero("P")).controlled(Control::zero("A"))).unwrap();
        c.set_outputs(&["A", "P", "W"]).unwrap();
        let back = parse_circuit(&c.to_json()).unwrap();
        assert_eq!(back, c);
    }

    #[test]
    fn isometry_property() {
        let mut c = Circuit::new(vec![Register::new("S", 2)], vec![Register::new("E", 2)]).unwrap();
        c.push(Gate::h("S")).unwrap();
        c.push(Gate::cnot("S", "E")).unwrap();
        assert_eq!(c.mode(), Mode::Isometry);
        assert!(c.check_isometry().unwrap() < 1e-12);
        assert_eq!(c.matrix().unwrap().shape(), (4, 2));
    }

    #[test]
    fn inverse_undoes_circuit() {
        let mut c = Circuit::new(vec![Register::new("A", 2), Register::new("B", 3)], vec![]).unwrap();
        c.extend([Gate::h("A"), Gate::new(GateKind::T, &["A"]), Gate::qft("B").controlled(Control::nonzero("A"))])
            .unwrap();
        let m = c.matrix().unwrap() * c.inverse().unwrap().matrix().unwrap();
        assert!(linalg::max_abs(&(m - CMatrix::identity(6, 6))) < 1e-12);
    }

    #[test]
    fn preparing_reproduces_state() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let rho = DensityMatrix::random(RegisterLayout::new(vec![2, 3]).unwrap(), 3, &mut rng);
        let c = Circuit::preparing(&rho, &["X", "Y"], "R").unwrap();
        let out = c.prepare().unwrap();
        assert!(linalg::max_abs(&(out.matrix() - rho.matrix())) < 1e-10);
    }
}
