//! Reduction circuits between promise problems, with their recorded promise bounds.

use serde::{Deserialize, Serialize};

use crate::circuit::{Circuit, CircuitJson, Control, Gate, Mode, Register};
use crate::error::{Error, Result};
use crate::linalg::{self, CMatrix, CVector};
use crate::locc::{locc_sep_bound, reduction_beta};
use crate::separability::{PartySpace, ProductEnsemble};
use crate::state::{trace_dist, Cut, DensityMatrix, PureState};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NormKind {
    Trace,
    OneWayLocc,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ProblemTag {
    PureProductState,
    SeparableIsometryOutput,
    PureProductIsometryOutput,
    ProductIsometryOutput,
    ProductState,
    SeparableState,
    QuantumStateSimilarity,
}

/// A bound recorded next to the primary `(alpha, beta)` pair.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NamedBound {
    pub name: String,
    pub value: f64,
}

/// Reduction output: a circuit, the cut its output is judged against, and the promise gap.
#[derive(Debug, Clone)]
pub struct PromiseInstance {
    pub tag: ProblemTag,
    pub circuit: Circuit,
    /// Second circuit for two-state problems (state similarity).
    pub partner: Option<Circuit>,
    /// Parties as groups of output-register labels.
    pub cut: Vec<Vec<String>>,
    pub norm: NormKind,
    pub alpha: f64,
    pub beta: f64,
    pub n: usize,
    pub delta: f64,
    pub bounds: Vec<NamedBound>,
    pub notes: Vec<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PromiseInstanceJson {
    pub tag: ProblemTag,
    pub norm: NormKind,
    pub alpha: f64,
    pub beta: f64,
    pub n: usize,
    pub delta: f64,
    pub cut: Vec<Vec<String>>,
    pub circuit: CircuitJson,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub partner: Option<CircuitJson>,
    #[serde(default)]
    pub bounds: Vec<NamedBound>,
    #[serde(default)]
    pub notes: Vec<String>,
}

impl PromiseInstance {
    /// Cut over the circuit's output layout.
    pub fn output_cut(&self) -> Result<Cut> {
        Cut::from_labels(&self.circuit.output_layout(), &self.cut)
    }

    pub fn to_json(&self) -> String {
        let j = PromiseInstanceJson {
            tag: self.tag,
            norm: self.norm,
            alpha: self.alpha,
            beta: self.beta,
            n: self.n,
            delta: self.delta,
            cut: self.cut.clone(),
            circuit: CircuitJson::from(&self.circuit),
            partner: self.partner.as_ref().map(CircuitJson::from),
            bounds: self.bounds.clone(),
            notes: self.notes.clone(),
        };
        serde_json::to_string_pretty(&j).expect("instance serialises")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let j: PromiseInstanceJson = serde_json::from_str(text).map_err(|e| Error::Serialization(e.to_string()))?;
        let inst = Self {
            tag: j.tag,
            circuit: j.circuit.try_into()?,
            partner: j.partner.map(Circuit::try_from).transpose()?,
            cut: j.cut,
            norm: j.norm,
            alpha: j.alpha,
            beta: j.beta,
            n: j.n,
            delta: j.delta,
            bounds: j.bounds,
            notes: j.notes,
        };
        inst.output_cut()?;
        Ok(inst)
    }

    fn check_gap(&self) -> Result<()> {
        if !(0.0..=2.0).contains(&self.alpha) {
            return Err(Error::InvalidArgument(format!("alpha = {} outside [0, 2]", self.alpha)));
        }
        let best = self.bounds.iter().map(|b| b.value).fold(self.beta, f64::max);
        if self.alpha >= best {
            return Err(Error::InvalidArgument(format!(
                "promise bounds cross: alpha = {} but the largest recorded beta is {best}",
                self.alpha
            )));
        }
        Ok(())
    }
}

/// A circuit with a designated decision register and accepting basis value.
#[derive(Debug, Clone)]
pub struct DecisionCircuit {
    pub circuit: Circuit,
    pub decision: String,
    pub accept: usize,
}

impl DecisionCircuit {
    pub fn new(circuit: Circuit, decision: &str, accept: usize) -> Result<Self> {
        let d = circuit
            .dim_of(decision)
            .ok_or_else(|| Error::InvalidArgument(format!("decision register `{decision}` not in circuit")))?;
        if accept >= d {
            return Err(Error::InvalidArgument("accept value exceeds decision dimension".into()));
        }
        if !circuit.outputs().iter().any(|o| o == decision) {
            return Err(Error::InvalidArgument("decision register must be an output".into()));
        }
        Ok(Self { circuit, decision: decision.into(), accept })
    }

    /// Acceptance probability on an input state.
    pub fn acceptance(&self, input: &DensityMatrix) -> Result<f64> {
        self.circuit.outcome_probability(input, &[(&self.decision, self.accept)])
    }
}

/// Toy verifiers standing in for BQP/QMA/QMA(2) machines at desk scale.
pub mod toys {
    use super::*;

    /// State preparation with no inputs whose decision qubit `D` is `|1>`; garbage `G` is `|0>`.
    pub fn always_accept_prep() -> DecisionCircuit {
        let mut c = Circuit::new(vec![], vec![Register::new("D", 2), Register::new("G", 2)]).unwrap();
        c.push(Gate::x("D")).unwrap();
        DecisionCircuit::new(c, "D", 1).unwrap()
    }

    /// State preparation whose decision qubit stays `|0>`.
    pub fn always_reject_prep() -> DecisionCircuit {
        let c = Circuit::new(vec![], vec![Register::new("D", 2), Register::new("G", 2)]).unwrap();
        DecisionCircuit::new(c, "D", 1).unwrap()
    }

    /// Prep accepting with probability `1 - delta`: `D` rotated to `sqrt(delta)|0> + sqrt(1-delta)|1>`
    /// and copied into `G`.
    pub fn noisy_accept_prep(delta: f64) -> DecisionCircuit {
        let mut c = Circuit::new(vec![], vec![Register::new("D", 2), Register::new("G", 2)]).unwrap();
        let (s, t) = (delta.sqrt(), (1.0 - delta).sqrt());
        let ry = CMatrix::from_row_slice(2, 2, &[linalg::c(s, 0.), linalg::c(-t, 0.), linalg::c(t, 0.), linalg::c(s, 0.)]);
        c.push(Gate::unitary(ry, &["D"])).unwrap();
        c.push(Gate::cnot("D", "G")).unwrap();
        DecisionCircuit::new(c, "D", 1).unwrap()
    }

    /// Verifier on `m` witness qubits `P0..` accepting iff the witness is `|1...1>`.
    pub fn accept_all_ones(m: usize) -> DecisionCircuit {
        let inputs: Vec<Register> = (0..m).map(|i| Register::new(&format!("P{i}"), 2)).collect();
        let mut c = Circuit::new(inputs, vec![Register::new("D", 2)]).unwrap();
        let mut g = Gate::x("D");
        for i in 0..m {
            g = g.controlled(Control::equals(&format!("P{i}"), 1));
        }
        c.push(g).unwrap();
        DecisionCircuit::new(c, "D", 1).unwrap()
    }

    /// Verifier that ignores its `m` witness qubits and rejects.
    pub fn always_reject(m: usize) -> DecisionCircuit {
        let inputs: Vec<Register> = (0..m).map(|i| Register::new(&format!("P{i}"), 2)).collect();
        let c = Circuit::new(inputs, vec![Register::new("D", 2)]).unwrap();
        DecisionCircuit::new(c, "D", 1).unwrap()
    }

    /// Unitary swap-test verifier on witnesses `a0..`, `b0..` (`m` qubits each) and control `w`;
    /// accepts on `w = 0`.
    pub fn swap_test_verifier(m: usize) -> Qma2Verifier {
        let a: Vec<String> = (0..m).map(|i| format!("a{i}")).collect();
        let b: Vec<String> = (0..m).map(|i| format!("b{i}")).collect();
        let mut labels: Vec<&str> = a.iter().chain(&b).map(|s| s.as_str()).collect();
        labels.push("w");
        let mut c = Circuit::on_qubits(&labels);
        c.push(Gate::h("w")).unwrap();
        for i in 0..m {
            c.push(Gate::swap(&a[i], &b[i]).controlled(Control::nonzero("w"))).unwrap();
        }
        c.push(Gate::h("w")).unwrap();
        Qma2Verifier::new(c, a, b, "w".into(), "w", 0).unwrap()
    }

    /// Identity verifier on `a0.., b0.., w` deciding on register `decision`.
    pub fn identity_verifier(m: usize, decision: &str, accept: usize) -> Qma2Verifier {
        let a: Vec<String> = (0..m).map(|i| format!("a{i}")).collect();
        let b: Vec<String> = (0..m).map(|i| format!("b{i}")).collect();
        let mut labels: Vec<&str> = a.iter().chain(&b).map(|s| s.as_str()).collect();
        labels.push("w");
        let c = Circuit::on_qubits(&labels);
        Qma2Verifier::new(c, a, b, "w".into(), decision, accept).unwrap()
    }
}

fn bell_pairs(c: &mut Circuit, left: &[String], right: &[String]) -> Result<()> {
    for (l, r) in left.iter().zip(right) {
        c.push(Gate::h(l))?;
        c.push(Gate::cnot(l, r))?;
    }
    Ok(())
}

fn qubit_labels(prefix: &str, n: usize) -> Vec<String> {
    (0..n).map(|j| format!("{prefix}{j}")).collect()
}

/// Shared builder for the BQP and QMA reductions: `phi+` on `AA'`, `|0>^n` on `B`,
/// the verifier on `P -> DG`, then swap `A'` and `B` when `D` rejects.
fn swap_on_reject(verifier: &DecisionCircuit, n: usize) -> Result<(Circuit, Vec<Vec<String>>)> {
    if n == 0 {
        return Err(Error::InvalidArgument("n must be at least 1".into()));
    }
    let v = &verifier.circuit;
    if v.mode() == Mode::Mixed {
        return Err(Error::InvalidArgument("verifier must be unitary or isometric".into()));
    }
    v.check_isometry()?;
    let rename = |l: &str| if l == verifier.decision { "D".to_string() } else { format!("G.{l}") };
    let v = v.relabeled(rename);
    let (a, ap, b) = (qubit_labels("A", n), qubit_labels("Ap", n), qubit_labels("B", n));
    let mut ancillas: Vec<Register> = v.ancillas().to_vec();
    for l in a.iter().chain(&ap).chain(&b) {
        ancillas.push(Register::new(l, 2));
    }
    let mut c = Circuit::new(v.inputs().to_vec(), ancillas)?;
    bell_pairs(&mut c, &a, &ap)?;
    c.extend(v.gates().iter().cloned())?;
    for (x, y) in ap.iter().zip(&b) {
        c.push(
            Gate::swap(x, y).controlled(Control { label: "D".into(), predicate: crate::circuit::Predicate::Orthogonal(verifier.accept) }),
        )?;
    }
    let garbage: Vec<String> = v.outputs().iter().filter(|o| o.as_str() != "D").cloned().collect();
    let mut outputs: Vec<&str> = a.iter().chain(&ap).chain(&b).map(|s| s.as_str()).collect();
    outputs.push("D");
    outputs.extend(garbage.iter().map(|s| s.as_str()));
    c.set_outputs(&outputs)?;
    let left: Vec<String> = a.iter().chain(&ap).cloned().collect();
    let mut right: Vec<String> = b.clone();
    right.push("D".into());
    right.extend(garbage);
    Ok((c, vec![left, right]))
}

fn swap_bounds(n: usize, delta: f64) -> Vec<NamedBound> {
    vec![NamedBound {
        name: "one_way_locc_singlet_test".into(),
        value: locc_sep_bound(n as u32) - 2.0 * delta.sqrt(),
    }]
}

/// BQP-hardness reduction to one-way-LOCC pure product state.
pub fn reduce_bqp(prep: &DecisionCircuit, n: usize, delta: f64) -> Result<PromiseInstance> {
    if !prep.circuit.inputs().is_empty() {
        return Err(Error::InvalidArgument("state preparation must have no inputs".into()));
    }
    let (circuit, cut) = swap_on_reject(prep, n)?;
    let inst = PromiseInstance {
        tag: ProblemTag::PureProductState,
        circuit,
        partner: None,
        cut,
        norm: NormKind::OneWayLocc,
        alpha: 2.0 * delta.sqrt(),
        beta: reduction_beta(n as u32, delta),
        n,
        delta,
        bounds: swap_bounds(n, delta),
        notes: vec!["delta is the verifier error; no amplification is applied".into()],
    };
    inst.check_gap()?;
    Ok(inst)
}

/// QMA-hardness reduction to one-way-LOCC separable isometry output.
pub fn reduce_qma(verifier: &DecisionCircuit, n: usize, delta: f64) -> Result<PromiseInstance> {
    let (circuit, cut) = swap_on_reject(verifier, n)?;
    let inst = PromiseInstance {
        tag: ProblemTag::SeparableIsometryOutput,
        circuit,
        partner: None,
        cut,
        norm: NormKind::OneWayLocc,
        alpha: 2.0 * delta.sqrt(),
        beta: reduction_beta(n as u32, delta),
        n,
        delta,
        bounds: swap_bounds(n, delta),
        notes: vec!["delta is the verifier error; no amplification is applied".into()],
    };
    inst.check_gap()?;
    Ok(inst)
}

/// Unitary two-witness verifier `V: ABW -> DG` with a single control register `W`.
#[derive(Debug, Clone)]
pub struct Qma2Verifier {
    pub circuit: Circuit,
    pub a: Vec<String>,
    pub b: Vec<String>,
    pub w: String,
    pub decision: String,
    pub accept: usize,
}

impl Qma2Verifier {
    pub fn new(circuit: Circuit, a: Vec<String>, b: Vec<String>, w: String, decision: &str, accept: usize) -> Result<Self> {
        if circuit.mode() != Mode::Unitary {
            return Err(Error::InvalidArgument("QMA(2) verifier must be unitary".into()));
        }
        let mut declared: Vec<&str> = a.iter().chain(&b).map(|s| s.as_str()).collect();
        declared.push(&w);
        let mut inputs: Vec<&str> = circuit.inputs().iter().map(|r| r.label.as_str()).collect();
        let mut sorted = declared.clone();
        sorted.sort_unstable();
        inputs.sort_unstable();
        if sorted != inputs {
            return Err(Error::InvalidArgument("A, B and W must partition the verifier registers".into()));
        }
        let d = circuit
            .dim_of(decision)
            .ok_or_else(|| Error::InvalidArgument(format!("decision register `{decision}` not in circuit")))?;
        if accept >= d {
            return Err(Error::InvalidArgument("accept value exceeds decision dimension".into()));
        }
        circuit.matrix().map(|m| linalg::unitary_deviation(&m)).and_then(|dev| {
            if dev > 1e-9 {
                Err(crate::error::CircuitError::NotUnitary(dev).into())
            } else {
                Ok(())
            }
        })?;
        Ok(Self { circuit, a, b, w, decision: decision.into(), accept })
    }

    fn dims(&self, labels: &[String]) -> Vec<usize> {
        labels.iter().map(|l| self.circuit.dim_of(l).unwrap()).collect()
    }

    /// Acceptance on product witnesses `|a>_A |b>_B |0>_W`.
    pub fn acceptance(&self, a: &CVector, b: &CVector) -> Result<f64> {
        let layout = self.circuit.input_layout();
        let order: Vec<String> = self.a.iter().chain(&self.b).chain(std::iter::once(&self.w)).cloned().collect();
        let w0 = {
            let mut v = CVector::zeros(self.circuit.dim_of(&self.w).unwrap());
            v[0] = linalg::ONE;
            v
        };
        let v = linalg::kron_vec(&linalg::kron_vec(a, b), &w0);
        // reorder from (A, B, W) to the circuit's input order
        let dims: Vec<usize> = order.iter().map(|l| self.circuit.dim_of(l).unwrap()).collect();
        let perm: Vec<usize> = (0..layout.len())
            .map(|i| order.iter().position(|l| *l == layout.label(i)).unwrap())
            .collect();
        let v = linalg::permute_vec(&v, &dims, &perm);
        let psi = PureState::new(v, layout)?;
        self.circuit.outcome_probability(&psi.to_density()?, &[(&self.decision, self.accept)])
    }

    pub fn a_dim(&self) -> usize {
        self.dims(&self.a).iter().product()
    }

    pub fn b_dim(&self) -> usize {
        self.dims(&self.b).iter().product()
    }
}

/// QMA(2)-hardness reduction to pure product isometry output.
///
/// `U: G -> ABCC'W`: prepare `D` in the accepting state, apply `V^dagger`, prepare
/// `phi+` on `CC'`, and swap `A` with `C` when `W` is orthogonal to `|0>`. `A` must
/// consist of `n` qubits.
pub fn reduce_qma2(v: &Qma2Verifier, n: usize, delta: f64) -> Result<PromiseInstance> {
    if v.a.len() != n || v.dims(&v.a).iter().any(|&d| d != 2) {
        return Err(Error::InvalidArgument(format!("register A must be {n} qubits")));
    }
    let g_inputs: Vec<Register> =
        v.circuit.inputs().iter().filter(|r| r.label != v.decision).cloned().collect();
    let (cc, ccp) = (qubit_labels("C", n), qubit_labels("Cp", n));
    let mut ancillas = vec![Register::new(&v.decision, v.circuit.dim_of(&v.decision).unwrap())];
    for l in cc.iter().chain(&ccp) {
        ancillas.push(Register::new(l, 2));
    }
    let mut c = Circuit::new(g_inputs, ancillas)?;
    if v.accept != 0 {
        let d = v.circuit.dim_of(&v.decision).unwrap();
        let mut shift = CMatrix::identity(d, d);
        shift.swap_columns(0, v.accept);
        c.push(Gate::unitary(shift, &[&v.decision]))?;
    }
    c.extend(v.circuit.inverse()?.gates().iter().cloned())?;
    bell_pairs(&mut c, &cc, &ccp)?;
    for (x, y) in v.a.iter().zip(&cc) {
        c.push(Gate::swap(x, y).controlled(Control::nonzero(&v.w)))?;
    }
    let mut outputs: Vec<&str> = v.a.iter().chain(&v.b).map(|s| s.as_str()).collect();
    outputs.extend(cc.iter().chain(&ccp).map(|s| s.as_str()));
    outputs.push(&v.w);
    c.set_outputs(&outputs)?;
    let left = v.a.clone();
    let mut right = v.b.clone();
    right.extend(cc.iter().cloned());
    right.extend(ccp.iter().cloned());
    right.push(v.w.clone());
    let s = delta.sqrt() + 2f64.powf(-(n as f64) / 2.0);
    let inst = PromiseInstance {
        tag: ProblemTag::PureProductIsometryOutput,
        circuit: c,
        partner: None,
        cut: vec![left, right],
        norm: NormKind::Trace,
        alpha: 2.0 * delta.sqrt(),
        beta: 2.0 * (1.0 - s * s).max(0.0).sqrt(),
        n,
        delta,
        bounds: vec![],
        notes: vec!["W is a single register; the swap fires when W is orthogonal to |0>".into()],
    };
    inst.check_gap()?;
    Ok(inst)
}

/// `Pi_0 U psi` and `(I - Pi_0) U psi` for the projector of register `w` onto `|0>`.
pub fn split_on_w(w: &str, out: &PureState) -> Result<(CVector, CVector)> {
    let layout = out.layout();
    let wi = layout
        .index_of(w)
        .ok_or_else(|| Error::InvalidArgument(format!("no register `{w}` in output")))?;
    let st = linalg::strides(layout.dims());
    let d = layout.dims()[wi];
    let mut zero = out.vector().clone();
    let mut rest = out.vector().clone();
    for i in 0..zero.len() {
        if (i / st[wi]) % d == 0 {
            rest[i] = linalg::ZERO;
        } else {
            zero[i] = linalg::ZERO;
        }
    }
    Ok((zero, rest))
}

/// QSZK-hardness reduction: `n` copies of `omega = (|0><0| (x) rho_0 + |1><1| (x) rho_1) / 2`.
///
/// Both preparations must have no inputs and equal output dimensions. Their gates run
/// controlled on a coin qubit `A_j` (Hadamard, then copied into a discarded `K_j`);
/// their garbage is discarded.
pub fn reduce_qszk(prep0: &Circuit, prep1: &Circuit, n: usize, delta: f64) -> Result<PromiseInstance> {
    if n == 0 {
        return Err(Error::InvalidArgument("n must be at least 1".into()));
    }
    if !prep0.inputs().is_empty() || !prep1.inputs().is_empty() {
        return Err(Error::InvalidArgument("preparations must have no inputs".into()));
    }
    let d0 = prep0.output_layout();
    let d1 = prep1.output_layout();
    if d0.dims() != d1.dims() {
        return Err(Error::LayoutMismatch(format!(
            "rho_0 outputs {:?} vs rho_1 outputs {:?}",
            d0.dims(),
            d1.dims()
        )));
    }
    let mut ancillas = Vec::new();
    let mut gates = Vec::new();
    let mut a_labels = Vec::new();
    let mut s_labels = Vec::new();
    for j in 0..n {
        let a = format!("A{j}");
        let k = format!("K{j}");
        ancillas.push(Register::new(&a, 2));
        ancillas.push(Register::new(&k, 2));
        // coin: half of a Bell pair whose other half K_j is discarded
        gates.push(Gate::h(&a));
        gates.push(Gate::cnot(&a, &k));
        a_labels.push(a.clone());
        let s_of = |i: usize| format!("S{j}.{i}");
        for (i, d) in d0.dims().iter().enumerate() {
            ancillas.push(Register::new(&s_of(i), *d));
            s_labels.push(s_of(i));
        }
        for (branch, prep) in [prep0, prep1].into_iter().enumerate() {
            let outs = prep.outputs().to_vec();
            let p = prep.relabeled(|l| match outs.iter().position(|o| o == l) {
                Some(i) => s_of(i),
                None => format!("R{j}.{branch}.{l}"),
            });
            for r in p.ancillas() {
                if r.label.starts_with('R') {
                    ancillas.push(r.clone());
                }
            }
            for g in p.gates() {
                gates.push(g.clone().controlled(Control::equals(&a, branch)));
            }
        }
    }
    let mut c = Circuit::new(vec![], ancillas)?;
    c.extend(gates)?;
    let outputs: Vec<&str> = a_labels.iter().chain(&s_labels).map(|s| s.as_str()).collect();
    c.set_outputs(&outputs)?;
    let inst = PromiseInstance {
        tag: ProblemTag::ProductState,
        circuit: c,
        partner: None,
        cut: vec![a_labels, s_labels],
        norm: NormKind::Trace,
        alpha: n as f64 * delta / 2.0,
        beta: (1.0 - delta) / 2.0,
        n,
        delta,
        bounds: vec![],
        notes: vec![
            "beta is the single-copy bound (1 - delta)/2; the n-copy bound 2 - 2^{-Omega(n)} has no explicit constant"
                .into(),
        ],
    };
    if inst.alpha >= 2.0 {
        return Err(Error::InvalidArgument("alpha = n delta / 2 exceeds 2".into()));
    }
    Ok(inst)
}

/// Two preparations from one: `rho_0 = rho` and `rho_1 = rho_{A_1} (x) ... (x) rho_{A_l}`
/// built from `l` copies of the preparation, copy `i` keeping only party `i`.
pub fn product_to_similarity(prep: &Circuit, cut: &Cut) -> Result<(Circuit, Circuit)> {
    if !prep.inputs().is_empty() {
        return Err(Error::InvalidArgument("preparation must have no inputs".into()));
    }
    let layout = prep.output_layout();
    cut.check_layout(&layout)?;
    cut.require_parties(2)?;
    let outputs: Vec<String> = prep.outputs().to_vec();
    let mut ancillas = Vec::new();
    let mut gates = Vec::new();
    for (i, group) in cut.groups().iter().enumerate() {
        let mine: Vec<&str> = group.iter().map(|&r| outputs[r].as_str()).collect();
        let copy = prep.relabeled(|l| if mine.contains(&l) { l.to_string() } else { format!("c{i}.{l}") });
        ancillas.extend(copy.ancillas().iter().cloned());
        gates.extend(copy.gates().iter().cloned());
    }
    let mut c1 = Circuit::new(vec![], ancillas)?;
    c1.extend(gates)?;
    let outs: Vec<&str> = outputs.iter().map(|s| s.as_str()).collect();
    c1.set_outputs(&outs)?;
    Ok((prep.clone(), c1))
}

/// Similarity instance `((l + 1) alpha, beta)` from a product-state instance `(alpha, beta)`.
pub fn similarity_instance(prep: &Circuit, cut: &Cut, alpha: f64, beta: f64) -> Result<PromiseInstance> {
    let (c0, c1) = product_to_similarity(prep, cut)?;
    let layout = prep.output_layout();
    let labels: Vec<Vec<String>> = cut.groups().iter().map(|g| g.iter().map(|&r| layout.label(r)).collect()).collect();
    let inst = PromiseInstance {
        tag: ProblemTag::QuantumStateSimilarity,
        circuit: c0,
        partner: Some(c1),
        cut: labels,
        norm: NormKind::Trace,
        alpha: (cut.parties() + 1) as f64 * alpha,
        beta,
        n: 1,
        delta: 0.0,
        bounds: vec![],
        notes: vec![],
    };
    inst.check_gap()?;
    Ok(inst)
}

/// Result of the separable-to-pure-product reduction.
#[derive(Debug, Clone)]
pub struct PureFromSeparable {
    /// Selected input `psi^x`.
    pub input: PureState,
    /// Selected product target `phi_1^x (x) ... (x) phi_l^x` on the output layout.
    pub product: PureState,
    /// `||U psi^x U^dagger - phi^x||_1`.
    pub distance: f64,
    pub index: usize,
    /// Average of the per-element distances, weighted by the dephasing probabilities
    /// conditioned on landing in an ensemble branch.
    pub average_distance: f64,
    /// `||U rho U^dagger - sigma||_1` for the supplied inputs.
    pub precondition_distance: f64,
}

/// Separable-to-pure-product reduction: purify `sigma` through the ensemble, align a
/// purification of `rho` with it (Uhlmann, by polar decomposition), dephase the
/// reference, and keep the best branch.
pub fn pure_from_separable(
    u: &Circuit,
    rho: &DensityMatrix,
    ens: &ProductEnsemble,
    cut: &Cut,
    delta: f64,
) -> Result<PureFromSeparable> {
    let out_layout = u.output_layout();
    let sigma = ens.state(&out_layout, cut)?;
    let image = u.run_mixed(rho)?;
    let pre = trace_dist(&image, &sigma)?;
    if pre > delta + 1e-6 {
        return Err(Error::Precondition(format!("||U rho U^* - sigma||_1 = {pre} exceeds delta = {delta}")));
    }
    let umat = u.matrix()?;
    let ps = PartySpace::new(&out_layout, cut)?;
    // product vectors on the output layout
    let phis: Vec<CVector> = ens
        .factors
        .iter()
        .map(|f| {
            let mut v = CVector::from_element(1, linalg::ONE);
            for x in f {
                v = linalg::kron_vec(&v, x);
            }
            ps.vec_from_party(&v)
        })
        .collect();
    let rank = linalg::eigvalsh(rho.matrix()).iter().filter(|&&l| l > 1e-14).count().max(1);
    let zdim = ens.len().max(rank);
    // tau = (I (x) U^dagger) sum_z sqrt(p_z) |z>|phi_z>, as rows T[z] = sqrt(p_z) U^dagger phi_z
    let din = rho.dim();
    let mut t = CMatrix::zeros(zdim, din);
    for (z, phi) in phis.iter().enumerate() {
        let row = umat.adjoint() * phi * linalg::c(ens.weights[z].sqrt(), 0.0);
        for s in 0..din {
            t[(z, s)] = row[s];
        }
    }
    let (vals, vecs) = linalg::eigh(rho.matrix());
    let keep: Vec<usize> = (0..vals.len()).filter(|&j| vals[j] > 1e-14).collect();
    // K[j, r] = sqrt(lambda_j) sum_s conj(T[r, s]) e_j[s]
    let mut k = CMatrix::zeros(keep.len(), zdim);
    for (jj, &j) in keep.iter().enumerate() {
        for r in 0..zdim {
            let mut s = linalg::ZERO;
            for x in 0..din {
                s += t[(r, x)].conj() * vecs[(x, j)];
            }
            k[(jj, r)] = s * vals[j].sqrt();
        }
    }
    // maximise |Tr(V K)| over isometries V: zdim x rank, V = W U^dagger from K = U S W^dagger
    let svd = k.clone().svd(true, true);
    let (ku, kvt) = (svd.u.unwrap(), svd.v_t.unwrap());
    let v = kvt.adjoint() * ku.adjoint();
    // X[r, s] = sum_j V[r, j] sqrt(lambda_j) e_j[s]
    let mut x = CMatrix::zeros(zdim, din);
    for (jj, &j) in keep.iter().enumerate() {
        for r in 0..zdim {
            for s in 0..din {
                x[(r, s)] += v[(r, jj)] * vecs[(s, j)] * vals[j].sqrt();
            }
        }
    }
    let mut best: Option<(f64, usize, CVector)> = None;
    let mut avg = 0.0;
    let mut mass = 0.0;
    for (z, phi) in phis.iter().enumerate() {
        let row = CVector::from_iterator(din, (0..din).map(|s| x[(z, s)]));
        let q = row.norm_squared();
        if q < 1e-14 {
            continue;
        }
        let psi = row.unscale(q.sqrt());
        let out = &umat * &psi;
        let ov = phi.dotc(&out).norm_sqr().min(1.0);
        let d = 2.0 * (1.0 - ov).max(0.0).sqrt();
        avg += q * d;
        mass += q;
        if best.as_ref().is_none_or(|b| d < b.0) {
            best = Some((d, z, psi));
        }
    }
    let (distance, index, psi) = best.ok_or_else(|| Error::Precondition("no ensemble branch survives dephasing".into()))?;
    Ok(PureFromSeparable {
        input: PureState::new(psi, u.input_layout())?,
        product: PureState::new(phis[index].clone(), out_layout)?,
        distance,
        index,
        average_distance: avg / mass,
        precondition_distance: pre,
    })
}

/// Preparation circuit for a known state, for feeding reductions.
pub fn preparation_for(rho: &DensityMatrix, prefix: &str) -> Result<Circuit> {
    let labels: Vec<String> = (0..rho.layout().len()).map(|i| format!("{prefix}{}", rho.layout().label(i))).collect();
    let refs: Vec<&str> = labels.iter().map(|s| s.as_str()).collect();
    Circuit::preparing(rho, &refs, &format!("{prefix}ref"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::locc::compiled_acceptance;
    use crate::separability::{max_product_expectation, nearest_pure_product, SeesawParams};
    use crate::state::{max_entangled, BellKind, RegisterLayout};

    fn output_state(inst: &PromiseInstance) -> PureState {
        let c = &inst.circuit;
        let input = PureState::basis(c.input_layout(), 0).unwrap();
        c.run_pure(&input).unwrap()
    }

    #[test]
    fn bqp_accept_is_product() {
        let inst = reduce_bqp(&toys::always_accept_prep(), 1, 0.0).unwrap();
        let psi = output_state(&inst);
        let cut = inst.output_cut().unwrap();
        let r = nearest_pure_product(&psi, &cut, &SeesawParams::default()).unwrap();
        assert!(r.distance < 1e-6, "{}", r.distance);
    }

    #[test]
    fn bqp_reject_marginal_is_bell() {
        for n in 1..=2 {
            let inst = reduce_bqp(&toys::always_reject_prep(), n, 0.0).unwrap();
            let rho = output_state(&inst).to_density().unwrap();
            let l = rho.layout();
            let keep: Vec<usize> = (0..n).chain(2 * n..3 * n).collect();
            let ab = rho.partial_trace(&keep).unwrap();
            let phi = max_entangled(n, BellKind::PhiPlus).unwrap().to_density().unwrap();
            assert!(linalg::max_abs(&(ab.matrix() - phi.matrix())) < 1e-9);
            assert_eq!(l.len(), 3 * n + 2);
            let adv = 1.0 - max_compiled_product(n);
            assert!(adv >= 1.0 - (2f64 / 3.0).powi(n as i32) - 1e-6);
            assert!((compiled_acceptance(ab.matrix(), n, BellKind::PhiPlus).unwrap() - 1.0).abs() < 1e-12);
        }
    }

    fn max_compiled_product(n: usize) -> f64 {
        let (ch, alice) = crate::locc::compiled_singlet_test(n, BellKind::PhiPlus);
        let mut op = CMatrix::zeros(1 << (2 * n), 1 << (2 * n));
        for (e, a) in ch.povm.elements().iter().zip(&alice) {
            op += linalg::kron(a, e);
        }
        let layout = RegisterLayout::qubits(2 * n);
        let cut = Cut::bipartite(n, 2 * n).unwrap();
        max_product_expectation(&op, &layout, &cut, &SeesawParams { restarts: 16, iters: 200, seed: 1 }).unwrap().value
    }

    #[test]
    fn empty_witness_qma_matches_bqp() {
        let mut v = toys::always_accept_prep();
        v.circuit = v.circuit.clone();
        let a = reduce_bqp(&v, 2, 0.0).unwrap();
        let b = reduce_qma(&v, 2, 0.0).unwrap();
        assert_eq!(a.circuit.gates(), b.circuit.gates());
        assert_eq!(a.cut, b.cut);
    }

    #[test]
    fn qma_accept_on_ones() {
        let inst = reduce_qma(&toys::accept_all_ones(1), 1, 0.0).unwrap();
        let input = PureState::basis(inst.circuit.input_layout(), 1).unwrap();
        let out = inst.circuit.run_pure(&input).unwrap();
        let r = nearest_pure_product(&out, &inst.output_cut().unwrap(), &SeesawParams::default()).unwrap();
        assert!(r.distance < 1e-6);
    }

    #[test]
    fn qma2_reductions() {
        let inst = reduce_qma2(&toys::identity_verifier(2, "b0", 0), 2, 0.0).unwrap();
        let input = PureState::basis(inst.circuit.input_layout(), 0).unwrap();
        let out = inst.circuit.run_pure(&input).unwrap();
        let cut = inst.output_cut().unwrap();
        assert!(nearest_pure_product(&out, &cut, &SeesawParams::default()).unwrap().distance < 1e-6);

        let rej = reduce_qma2(&toys::identity_verifier(2, "w", 1), 2, 0.0).unwrap();
        let mut rng = crate::rng_for(5, 0);
        for _ in 0..4 {
            let psi = PureState::random(rej.circuit.input_layout(), &mut rng);
            let out = rej.circuit.run_pure(&psi).unwrap();
            let r = nearest_pure_product(&out, &rej.output_cut().unwrap(), &SeesawParams::default()).unwrap();
            assert!(r.overlap <= 0.25 + 1e-6, "{}", r.overlap);
            let (z, rest) = split_on_w("w", &out).unwrap();
            assert!(((z + rest) - out.vector()).norm() < 1e-12);
        }
    }

    #[test]
    fn qszk_examples() {
        let zero = DensityMatrix::from_parts_unchecked(linalg::projector(&CVector::from_vec(vec![linalg::ONE, linalg::ZERO])), RegisterLayout::qubits(1));
        let one = DensityMatrix::from_parts_unchecked(linalg::projector(&CVector::from_vec(vec![linalg::ZERO, linalg::ONE])), RegisterLayout::qubits(1));
        let p0 = preparation_for(&zero, "s").unwrap();
        let p1 = preparation_for(&one, "s").unwrap();
        let inst = reduce_qszk(&p0, &p1, 1, 0.0).unwrap();
        let w = inst.circuit.prepare().unwrap();
        let mut want = CMatrix::zeros(4, 4);
        want[(0, 0)] = linalg::c(0.5, 0.);
        want[(3, 3)] = linalg::c(0.5, 0.);
        assert!(linalg::max_abs(&(w.matrix() - &want)) < 1e-12, "{} {}", w.matrix(), inst.circuit.to_json());
        let same = reduce_qszk(&p0, &p0, 2, 0.0).unwrap();
        let w = same.circuit.prepare().unwrap();
        assert!((w.matrix().trace().re - 1.0).abs() < 1e-12);
        let cut = same.output_cut().unwrap();
        let prod = crate::separability::product_of_marginals(&w, &cut).unwrap();
        assert!(trace_dist(&w, &prod).unwrap() < 1e-9);
        // correlated case: rho vs product of marginals differ by 1
        let (c0, c1) = product_to_similarity(&inst.circuit, &inst.output_cut().unwrap()).unwrap();
        let d = trace_dist(&c0.prepare().unwrap(), &c1.prepare().unwrap()).unwrap();
        assert!((d - 1.0).abs() < 1e-9, "{d}");
    }

    #[test]
    fn pure_from_separable_exact() {
        let mut rng = crate::rng_for(9, 0);
        let layout = RegisterLayout::qubits(2);
        let cut = Cut::finest(2);
        let ens = ProductEnsemble::random(&[2, 2], 1, &mut rng);
        let u = linalg::random_unitary(4, &mut rng);
        let mut c = Circuit::on_qubits(&["q0", "q1"]);
        c.push(Gate::unitary(u.clone(), &["q0", "q1"])).unwrap();
        let sigma = ens.state(&layout, &cut).unwrap();
        let rho = DensityMatrix::new(u.adjoint() * sigma.matrix() * &u, layout).unwrap();
        let r = pure_from_separable(&c, &rho, &ens, &cut, 0.0).unwrap();
        assert!(r.distance < 1e-6, "{}", r.distance);
        assert!(r.distance <= r.average_distance + 1e-12);
    }

    #[test]
    fn gap_crossing_is_rejected() {
        assert!(reduce_bqp(&toys::always_accept_prep(), 1, 0.5).is_err());
        let e = Circuit::on_qubits(&["x"]);
        assert!(reduce_qszk(&e, &Circuit::on_qubits(&["y"]), 1, 0.0).is_err());
    }

    #[test]
    fn instance_json_round_trip() {
        let inst = reduce_qma(&toys::accept_all_ones(1), 1, 0.01).unwrap();
        let back = PromiseInstance::from_json(&inst.to_json()).unwrap();
        assert_eq!(back.circuit, inst.circuit);
        assert_eq!(back.cut, inst.cut);
        assert_eq!(back.alpha, inst.alpha);
    }
}
