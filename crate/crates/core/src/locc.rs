//! One-way LOCC norms, twirling, and the twirl-then-Pauli singlet test.
//!
//! States for the singlet test live on `2n` qubits ordered `A0..A(n-1), B0..B(n-1)`;
//! pair `i` is `(A_i, B_i)`. Bob holds the `B` qubits and is the measured party.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, CMatrix, CVector, ONE, ZERO};
use crate::state::{BellKind, Cut, DensityMatrix, Povm, RegisterLayout};
use crate::{rng_for, ProtocolOutcome};

// ---------------------------------------------------------------------------
// quantum-to-classical channels
// ---------------------------------------------------------------------------

/// Measure-and-record channel `Lambda(X) = sum_m Tr(Lambda_m X) |m><m|`.
#[derive(Debug, Clone)]
pub struct QcChannel {
    pub povm: Povm,
}

impl QcChannel {
    pub fn new(povm: Povm) -> Self {
        Self { povm }
    }

    pub fn outcomes(&self) -> usize {
        self.povm.len()
    }
}

/// Tensor product of measurements (outcomes enumerated big-endian).
pub fn product_povm(povms: &[Povm]) -> Povm {
    let mut elems = vec![CMatrix::identity(1, 1)];
    for p in povms {
        let mut next = Vec::with_capacity(elems.len() * p.len());
        for e in &elems {
            for f in p.elements() {
                next.push(linalg::kron(e, f));
            }
        }
        elems = next;
    }
    Povm::from_parts_unchecked(elems)
}

/// `Tr_B[(I (x) L) X]` for `X` on `A (x) B` with `A` first (dimensions `da`, `db`).
fn contract_b(x: &CMatrix, da: usize, db: usize, l: &CMatrix) -> CMatrix {
    let mut out = CMatrix::zeros(da, da);
    for a in 0..da {
        for ap in 0..da {
            let mut s = ZERO;
            for b in 0..db {
                for bp in 0..db {
                    let lv = l[(bp, b)];
                    if lv != ZERO {
                        s += x[(a * db + b, ap * db + bp)] * lv;
                    }
                }
            }
            out[(a, ap)] = s;
        }
    }
    out
}

/// Reorders `X` so that `kept` registers come first and `measured` last.
fn split_operator(x: &CMatrix, layout: &RegisterLayout, measured: &[usize]) -> Result<(CMatrix, usize, usize)> {
    if x.nrows() != layout.dim() || x.ncols() != layout.dim() {
        return Err(Error::LayoutMismatch("operator does not match layout".into()));
    }
    for &m in measured {
        if m >= layout.len() {
            return Err(Error::InvalidArgument(format!("register {m} out of range")));
        }
    }
    let kept = linalg::complement(layout.len(), measured);
    let mut order = kept.clone();
    order.extend_from_slice(measured);
    let xp = linalg::permute_mat(x, layout.dims(), &order);
    let da: usize = kept.iter().map(|&i| layout.dims()[i]).product();
    let db: usize = measured.iter().map(|&i| layout.dims()[i]).product();
    Ok((xp, da, db))
}

/// `(I (x) Lambda)(X)` with `Lambda` acting on the `measured` registers.
///
/// The result lives on the kept registers (layout order) followed by a classical
/// register of dimension `#outcomes`; it is block diagonal in the outcome.
pub fn apply_qc(x: &CMatrix, layout: &RegisterLayout, measured: &[usize], ch: &QcChannel) -> Result<CMatrix> {
    let (xp, da, db) = split_operator(x, layout, measured)?;
    if ch.povm.dim() != db {
        return Err(Error::LayoutMismatch(format!(
            "measurement dimension {} vs measured registers {db}",
            ch.povm.dim()
        )));
    }
    let m = ch.outcomes();
    let mut out = CMatrix::zeros(da * m, da * m);
    for (k, e) in ch.povm.elements().iter().enumerate() {
        let blk = contract_b(&xp, da, db, e);
        for a in 0..da {
            for ap in 0..da {
                out[(a * m + k, ap * m + k)] = blk[(a, ap)];
            }
        }
    }
    Ok(out)
}

/// `||(I (x) Lambda)(X)||_1`: a lower bound on the one-way LOCC norm of `X`.
pub fn locc_norm_lower(x: &CMatrix, layout: &RegisterLayout, measured: &[usize], ch: &QcChannel) -> Result<f64> {
    let (xp, da, db) = split_operator(x, layout, measured)?;
    if ch.povm.dim() != db {
        return Err(Error::LayoutMismatch("measurement dimension mismatch".into()));
    }
    Ok(ch
        .povm
        .elements()
        .iter()
        .map(|e| {
            let b = contract_b(&xp, da, db, e);
            crate::state::trace_norm(&b).unwrap_or(0.0)
        })
        .sum())
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LoccEstimate {
    /// Best lower bound found.
    pub value: f64,
    /// Best value after each sweep of the winning restart (nondecreasing).
    pub history: Vec<f64>,
    pub restarts: usize,
    pub iters: usize,
    pub seed: u64,
    /// Winning measurement bases, one unitary per measured party (columns are outcomes).
    #[serde(skip)]
    pub bases: Vec<CMatrix>,
}

/// Objective for rank-one product bases: sum over outcome tuples of the trace norm
/// of the conditional operator on the first party.
struct LoccProblem {
    xp: CMatrix,
    da: usize,
    pdims: Vec<usize>,
}

impl LoccProblem {
    fn db(&self) -> usize {
        self.pdims.iter().product()
    }

    fn tuples(&self) -> Vec<Vec<usize>> {
        (0..self.db()).map(|i| linalg::digits(i, &self.pdims)).collect()
    }

    fn outcome_vector(&self, bases: &[CMatrix], t: &[usize]) -> CVector {
        let mut v = CVector::from_element(1, ONE);
        for (j, &m) in t.iter().enumerate() {
            v = linalg::kron_vec(&v, &bases[j].column(m).into_owned());
        }
        v
    }

    fn block(&self, u: &CVector) -> CMatrix {
        let (da, db) = (self.da, self.db());
        let mut out = CMatrix::zeros(da, da);
        for a in 0..da {
            for ap in 0..da {
                let mut s = ZERO;
                for b in 0..db {
                    let cb = u[b].conj();
                    if cb == ZERO {
                        continue;
                    }
                    for bp in 0..db {
                        s += cb * self.xp[(a * db + b, ap * db + bp)] * u[bp];
                    }
                }
                out[(a, ap)] = s;
            }
        }
        out
    }

    fn value(&self, bases: &[CMatrix]) -> f64 {
        self.tuples()
            .iter()
            .map(|t| linalg::trace_norm_hermitian(&self.block(&self.outcome_vector(bases, t))))
            .sum()
    }

    /// Operators `G_m` on party `j` with `sum_m <u_m|G_m|u_m>` equal to the objective
    /// at fixed signs.
    fn party_operators(&self, bases: &[CMatrix], j: usize) -> Vec<CMatrix> {
        let (da, db) = (self.da, self.db());
        let dj = self.pdims[j];
        let mut g = vec![CMatrix::zeros(dj, dj); dj];
        let others: Vec<usize> = (0..self.pdims.len()).filter(|&i| i != j).collect();
        let ot = linalg::subsystem_offsets(&self.pdims, &[j]);
        let or = linalg::subsystem_offsets(&self.pdims, &others);
        for t in self.tuples() {
            let s = linalg::hermitian_sign(&self.block(&self.outcome_vector(bases, &t)));
            // Y = Tr_A[(S (x) I) X] on the measured block
            let mut y = CMatrix::zeros(db, db);
            for b in 0..db {
                for bp in 0..db {
                    let mut acc = ZERO;
                    for a in 0..da {
                        for ap in 0..da {
                            acc += s[(ap, a)] * self.xp[(a * db + b, ap * db + bp)];
                        }
                    }
                    y[(b, bp)] = acc;
                }
            }
            // contract the other parties with their outcome vectors
            let mut w = CVector::from_element(1, ONE);
            for &i in &others {
                w = linalg::kron_vec(&w, &bases[i].column(t[i]).into_owned());
            }
            let gm = &mut g[t[j]];
            for c in 0..dj {
                for cp in 0..dj {
                    let mut acc = ZERO;
                    for (r, &orr) in or.iter().enumerate() {
                        for (rp, &orp) in or.iter().enumerate() {
                            acc += w[r].conj() * y[(ot[c] + orr, ot[cp] + orp)] * w[rp];
                        }
                    }
                    gm[(c, cp)] += acc;
                }
            }
        }
        g.iter().map(linalg::hermitize).collect()
    }
}

/// Orthonormal basis maximising `sum_m <u_m|G_m|u_m>` one polar step from `u`.
fn polar_step(u: &CMatrix, g: &[CMatrix]) -> CMatrix {
    let d = u.nrows();
    let shift = g
        .iter()
        .map(|x| linalg::eigvalsh(x).first().copied().unwrap_or(0.0))
        .fold(0.0f64, |a, l| a.max(-l))
        + 1e-9;
    let mut a = CMatrix::zeros(d, d);
    for m in 0..d {
        let col = (&g[m] + CMatrix::identity(d, d).scale(shift)) * u.column(m);
        a.set_column(m, &col);
    }
    let svd = a.svd(true, true);
    svd.u.unwrap() * svd.v_t.unwrap()
}

fn perturb<R: Rng + ?Sized>(u: &CMatrix, scale: f64, rng: &mut R) -> CMatrix {
    let d = u.nrows();
    let g = CMatrix::identity(d, d) + CMatrix::from_fn(d, d, |_, _| linalg::gaussian(rng)).scale(scale);
    let q = g.qr().q();
    q * u
}

/// Heuristic lower bound on the multi-party one-way LOCC norm of `x`.
///
/// Party 0 of `cut` is unmeasured; every other party measures in an orthonormal
/// basis. Each restart starts from a seeded basis (restart 0 uses computational
/// bases) and sweeps the parties with a polar eigen-alignment step plus a random
/// perturbation, accepting only improvements.
pub fn locc_norm_estimate(
    x: &CMatrix,
    layout: &RegisterLayout,
    cut: &Cut,
    restarts: usize,
    iters: usize,
    seed: u64,
) -> Result<LoccEstimate> {
    cut.check_layout(layout)?;
    cut.require_parties(2)?;
    let measured: Vec<usize> = cut.groups()[1..].iter().flatten().copied().collect();
    let kept_party = &cut.groups()[0];
    let mut order = kept_party.clone();
    order.extend_from_slice(&measured);
    let xp = linalg::permute_mat(&linalg::hermitize(x), layout.dims(), &order);
    let da = cut.party_dim(layout, 0);
    let pdims: Vec<usize> = (1..cut.parties()).map(|p| cut.party_dim(layout, p)).collect();
    let prob = LoccProblem { xp, da, pdims };
    let restarts = restarts.max(1);

    let runs: Vec<(f64, Vec<f64>, Vec<CMatrix>)> = (0..restarts)
        .into_par_iter()
        .map(|r| {
            let mut rng = rng_for(seed, r as u64);
            let mut bases: Vec<CMatrix> = prob
                .pdims
                .iter()
                .map(|&d| if r == 0 { CMatrix::identity(d, d) } else { linalg::random_unitary(d, &mut rng) })
                .collect();
            let mut best = prob.value(&bases);
            let mut hist = vec![best];
            for it in 0..iters {
                let before = best;
                for j in 0..prob.pdims.len() {
                    let g = prob.party_operators(&bases, j);
                    let mut cand = bases.clone();
                    cand[j] = polar_step(&bases[j], &g);
                    let v = prob.value(&cand);
                    if v > best {
                        best = v;
                        bases = cand;
                    }
                    let mut cand = bases.clone();
                    cand[j] = perturb(&bases[j], 0.3 / (1.0 + it as f64), &mut rng);
                    let v = prob.value(&cand);
                    if v > best {
                        best = v;
                        bases = cand;
                    }
                }
                hist.push(best);
                if best - before < 1e-13 && it > 4 {
                    break;
                }
            }
            (best, hist, bases)
        })
        .collect();
    // first maximum in restart order keeps the result independent of scheduling
    let mut win = 0;
    for (i, r) in runs.iter().enumerate() {
        if r.0 > runs[win].0 {
            win = i;
        }
    }
    let (value, history, bases) = runs[win].clone();
    Ok(LoccEstimate { value, history, restarts, iters, seed, bases })
}

// ---------------------------------------------------------------------------
// Bell states, Werner states and twirling
// ---------------------------------------------------------------------------

/// Bell vectors in the order `phi+, phi-, psi+, psi-`.
pub fn bell_vectors() -> [CVector; 4] {
    let h = std::f64::consts::FRAC_1_SQRT_2;
    let v = |a: [f64; 4]| CVector::from_iterator(4, a.iter().map(|&x| linalg::c(x * h, 0.0)));
    [v([1., 0., 0., 1.]), v([1., 0., 0., -1.]), v([0., 1., 1., 0.]), v([0., 1., -1., 0.])]
}

fn singlet_projector() -> CMatrix {
    linalg::projector(&bell_vectors()[3])
}

/// `p |psi-><psi-| + (1 - p)/3 (I - |psi-><psi-|)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WernerState {
    pub p: f64,
}

impl WernerState {
    pub fn new(p: f64) -> Result<Self> {
        if !(-1e-12..=1.0 + 1e-12).contains(&p) {
            return Err(Error::InvalidArgument(format!("singlet weight {p} outside [0, 1]")));
        }
        Ok(Self { p: p.clamp(0.0, 1.0) })
    }

    pub fn is_separable(&self) -> bool {
        self.p <= 0.5 + 1e-12
    }

    pub fn matrix(&self) -> CMatrix {
        let s = singlet_projector();
        s.scale(self.p) + (CMatrix::identity(4, 4) - &s).scale((1.0 - self.p) / 3.0)
    }

    pub fn density(&self) -> DensityMatrix {
        DensityMatrix::from_parts_unchecked(self.matrix(), RegisterLayout::qubits(2))
    }
}

#[derive(Debug, Clone)]
pub struct Twirl {
    pub werner: WernerState,
    /// Image of the `U (x) U` twirl: the Werner state with the input's singlet weight.
    pub state: DensityMatrix,
    /// `<B_i|rho|B_i>` for `phi+, phi-, psi+, psi-`.
    pub bell_weights: [f64; 4],
}

fn check_pair(rho: &DensityMatrix) -> Result<()> {
    if rho.layout().dims() != [2, 2] {
        return Err(Error::LayoutMismatch("twirl acts on a qubit pair".into()));
    }
    Ok(())
}

/// Exact `U (x) U` twirl via the singlet projection.
pub fn twirl_exact(rho: &DensityMatrix) -> Result<Twirl> {
    check_pair(rho)?;
    let bv = bell_vectors();
    let bell_weights = std::array::from_fn(|i| (bv[i].adjoint() * rho.matrix() * &bv[i])[(0, 0)].re);
    let werner = WernerState::new(bell_weights[3])?;
    Ok(Twirl { werner, state: werner.density(), bell_weights })
}

/// Twirl channel on a pair operator (need not be a state).
fn twirl_operator(x: &CMatrix) -> CMatrix {
    let s = singlet_projector();
    let p = (&s * x).trace();
    let rest = x.trace() - p;
    s.map(|z| z * p) + (CMatrix::identity(4, 4) - &s).map(|z| z * rest / 3.0)
}

/// The 24 single-qubit Clifford unitaries modulo global phase, generated from `H` and `S`.
pub fn clifford_group() -> Vec<CMatrix> {
    let h = std::f64::consts::FRAC_1_SQRT_2;
    let hm = CMatrix::from_row_slice(2, 2, &[linalg::c(h, 0.), linalg::c(h, 0.), linalg::c(h, 0.), linalg::c(-h, 0.)]);
    let sm = CMatrix::from_row_slice(2, 2, &[ONE, ZERO, ZERO, linalg::I]);
    let canon = |m: &CMatrix| {
        let v = CVector::from_iterator(4, m.iter().copied());
        let v = linalg::fix_phase(v);
        CMatrix::from_iterator(2, 2, v.iter().copied())
    };
    let same = |a: &CMatrix, b: &CMatrix| linalg::max_abs(&(a - b)) < 1e-9;
    let mut group = vec![CMatrix::identity(2, 2)];
    let mut frontier = group.clone();
    while !frontier.is_empty() {
        let mut next = Vec::new();
        for g in &frontier {
            for gen in [&hm, &sm] {
                let c = canon(&(gen * g));
                if !group.iter().any(|x| same(x, &c)) {
                    group.push(c.clone());
                    next.push(c);
                }
            }
        }
        frontier = next;
    }
    group
}

/// Average of `(U (x) U) rho (U (x) U)^dagger` over the single-qubit Clifford group.
pub fn twirl_sampled(rho: &DensityMatrix) -> Result<DensityMatrix> {
    check_pair(rho)?;
    let cl = clifford_group();
    let mut acc = CMatrix::zeros(4, 4);
    for u in &cl {
        let uu = linalg::kron(u, u);
        acc += &uu * rho.matrix() * uu.adjoint();
    }
    Ok(DensityMatrix::from_parts_unchecked(
        linalg::hermitize(&acc.unscale(cl.len() as f64)),
        rho.layout().clone(),
    ))
}

/// Twirl with one Clifford drawn uniformly at random.
pub fn twirl_random_clifford<R: Rng + ?Sized>(rho: &DensityMatrix, rng: &mut R) -> Result<DensityMatrix> {
    check_pair(rho)?;
    let cl = clifford_group();
    let u = &cl[rng.random_range(0..cl.len())];
    let uu = linalg::kron(u, u);
    Ok(DensityMatrix::from_parts_unchecked(&uu * rho.matrix() * uu.adjoint(), rho.layout().clone()))
}

// ---------------------------------------------------------------------------
// singlet test
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Pauli {
    X,
    Y,
    Z,
}

impl Pauli {
    pub const ALL: [Pauli; 3] = [Pauli::X, Pauli::Y, Pauli::Z];

    pub fn matrix(self) -> CMatrix {
        match self {
            Pauli::X => CMatrix::from_row_slice(2, 2, &[ZERO, ONE, ONE, ZERO]),
            Pauli::Y => CMatrix::from_row_slice(2, 2, &[ZERO, -linalg::I, linalg::I, ZERO]),
            Pauli::Z => CMatrix::from_row_slice(2, 2, &[ONE, ZERO, ZERO, -ONE]),
        }
    }

    /// Columns are the `+1` and `-1` eigenvectors.
    pub fn eigenbasis(self) -> CMatrix {
        let h = std::f64::consts::FRAC_1_SQRT_2;
        let c = linalg::c;
        match self {
            Pauli::X => CMatrix::from_row_slice(2, 2, &[c(h, 0.), c(h, 0.), c(h, 0.), c(-h, 0.)]),
            Pauli::Y => CMatrix::from_row_slice(2, 2, &[c(h, 0.), c(h, 0.), c(0., h), c(0., -h)]),
            Pauli::Z => CMatrix::identity(2, 2),
        }
    }

    /// Projector onto the eigenvalue `(-1)^outcome` eigenspace.
    pub fn projector(self, outcome: usize) -> CMatrix {
        linalg::projector(&self.eigenbasis().column(outcome).into_owned())
    }

    pub fn symbol(self) -> char {
        match self {
            Pauli::X => 'X',
            Pauli::Y => 'Y',
            Pauli::Z => 'Z',
        }
    }
}

/// Number of pairs for a `2n`-qubit singlet-test input.
fn pairs_of(rho: &DensityMatrix) -> Result<usize> {
    let d = rho.layout().dims();
    if d.is_empty() || d.len() % 2 != 0 || d.iter().any(|&x| x != 2) {
        return Err(Error::LayoutMismatch("singlet test needs 2n qubits A..., B...".into()));
    }
    Ok(d.len() / 2)
}

fn xz() -> CMatrix {
    Pauli::X.matrix() * Pauli::Z.matrix()
}

/// Maps the chosen maximally entangled target onto `n` singlets by a fixed unitary on
/// Bob's side (`(I (x) XZ) phi+ = psi-`).
fn adapt_to_singlets(rho: &DensityMatrix, n: usize, target: BellKind) -> CMatrix {
    match target {
        BellKind::Singlet => rho.matrix().clone(),
        BellKind::PhiPlus => {
            let mut m = rho.matrix().clone();
            for i in 0..n {
                m = linalg::conjugate_local(&m, rho.layout().dims(), &[n + i], &xz());
            }
            m
        }
    }
}

/// Per-pair twirl applied to every pair.
fn twirl_pairs(m: &CMatrix, dims: &[usize], n: usize) -> CMatrix {
    let mut out = m.clone();
    for i in 0..n {
        out = linalg::map_local_blocks(&out, dims, &[i, n + i], twirl_operator);
    }
    out
}

/// Accept operator for one Pauli choice: outcome pairs differ on every pair.
fn pauli_accept_operator(choice: &[Pauli]) -> CMatrix {
    let n = choice.len();
    let mut m = CMatrix::identity(1, 1);
    for &p in choice {
        let pp = linalg::kron(&p.matrix(), &p.matrix());
        m = linalg::kron(&m, &(CMatrix::identity(4, 4) - pp).scale(0.5));
    }
    // pair-major order A0 B0 A1 B1 ... to A... B...
    let dims = vec![2; 2 * n];
    let order: Vec<usize> = (0..n).map(|i| 2 * i).chain((0..n).map(|i| 2 * i + 1)).collect();
    linalg::permute_mat(&m, &dims, &order)
}

fn pauli_choices(n: usize) -> Vec<Vec<Pauli>> {
    (0..3usize.pow(n as u32))
        .map(|i| linalg::digits(i, &vec![3; n]).into_iter().map(|k| Pauli::ALL[k]).collect())
        .collect()
}

/// Exact singlet-test acceptance: twirl each pair, then average the Pauli test over
/// all `3^n` choices.
pub fn singlet_test_analytic(rho: &DensityMatrix) -> Result<f64> {
    singlet_test_analytic_for(rho, BellKind::Singlet)
}

/// Singlet test adapted to another maximally entangled target.
pub fn singlet_test_analytic_for(rho: &DensityMatrix, target: BellKind) -> Result<f64> {
    let n = pairs_of(rho)?;
    let m = adapt_to_singlets(rho, n, target);
    let tw = twirl_pairs(&m, rho.layout().dims(), n);
    let choices = pauli_choices(n);
    let total: f64 = choices
        .iter()
        .map(|c| {
            let acc = pauli_accept_operator(c);
            // Tr(M X) elementwise
            acc.iter().zip(tw.transpose().iter()).map(|(a, b)| (a * b).re).sum::<f64>()
        })
        .sum();
    Ok((total / choices.len() as f64).clamp(0.0, 1.0))
}

/// Acceptance of a single Pauli test (no twirl) on a qubit pair, averaged over `X, Y, Z`.
pub fn pauli_test_prob(rho: &DensityMatrix) -> Result<f64> {
    check_pair(rho)?;
    let s: f64 = Pauli::ALL.iter().map(|&p| rho.expectation(&pauli_accept_operator(&[p]))).sum();
    Ok(s / 3.0)
}

/// Overall accept operator averaged over Pauli choices: `(I/3 + 2 psi-/3)^{(x) n}`
/// in the `A..., B...` layout.
pub fn singlet_accept_operator(n: usize, target: BellKind) -> CMatrix {
    let s = singlet_projector();
    let pair = CMatrix::identity(4, 4).scale(1.0 / 3.0) + s.scale(2.0 / 3.0);
    let mut m = CMatrix::identity(1, 1);
    for _ in 0..n {
        m = linalg::kron(&m, &pair);
    }
    let dims = vec![2; 2 * n];
    let order: Vec<usize> = (0..n).map(|i| 2 * i).chain((0..n).map(|i| 2 * i + 1)).collect();
    let mut m = linalg::permute_mat(&m, &dims, &order);
    if target == BellKind::PhiPlus {
        for i in 0..n {
            m = linalg::conjugate_local(&m, &dims, &[n + i], &xz().adjoint());
        }
    }
    m
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SingletTestRecord {
    pub cliffords: Vec<usize>,
    pub paulis: Vec<char>,
    /// `(alice, bob)` outcomes in `{+1, -1}` per pair.
    pub outcomes: Vec<(i8, i8)>,
    pub accept: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SingletMonteCarlo {
    pub outcome: ProtocolOutcome,
    pub records: Vec<SingletTestRecord>,
}

fn sample_trial(m: &CMatrix, dims: &[usize], n: usize, cl: &[CMatrix], rng: &mut impl Rng) -> SingletTestRecord {
    let mut cliffords = Vec::with_capacity(n);
    let mut paulis = Vec::with_capacity(n);
    let mut st = m.clone();
    for i in 0..n {
        let c = rng.random_range(0..cl.len());
        let p = Pauli::ALL[rng.random_range(0..3)];
        let v = p.eigenbasis().adjoint() * &cl[c];
        st = linalg::conjugate_local(&st, dims, &[i, n + i], &linalg::kron(&v, &v));
        cliffords.push(c);
        paulis.push(p.symbol());
    }
    let probs: Vec<f64> = (0..st.nrows()).map(|k| st[(k, k)].re.max(0.0)).collect();
    let total: f64 = probs.iter().sum();
    let mut r = rng.random::<f64>() * total;
    let mut k = probs.len() - 1;
    for (i, &p) in probs.iter().enumerate() {
        if r < p {
            k = i;
            break;
        }
        r -= p;
    }
    let dg = linalg::digits(k, dims);
    let sign = |b: usize| if b == 0 { 1i8 } else { -1i8 };
    let outcomes: Vec<(i8, i8)> = (0..n).map(|i| (sign(dg[i]), sign(dg[n + i]))).collect();
    let accept = outcomes.iter().all(|(a, b)| a != b);
    SingletTestRecord { cliffords, paulis, outcomes, accept }
}

/// Monte Carlo run of the protocol; trial `t` draws from its own stream of `seed`.
pub fn singlet_test_mc(rho: &DensityMatrix, target: BellKind, trials: usize, seed: u64) -> Result<SingletMonteCarlo> {
    if trials < 1 {
        return Err(Error::InvalidArgument("need at least one trial".into()));
    }
    let n = pairs_of(rho)?;
    let m = adapt_to_singlets(rho, n, target);
    let dims = rho.layout().dims().to_vec();
    let cl = clifford_group();
    let records: Vec<SingletTestRecord> = (0..trials)
        .into_par_iter()
        .map(|t| {
            let mut rng = rng_for(seed, t as u64);
            sample_trial(&m, &dims, n, &cl, &mut rng)
        })
        .collect();
    let accepted = records.iter().filter(|r| r.accept).count();
    let f = accepted as f64 / trials as f64;
    let outcome = ProtocolOutcome::sampled(f, trials, accepted, seed, format!("singlet test, {n} pairs"));
    Ok(SingletMonteCarlo { outcome, records })
}

/// The singlet test compiled into Bob's measurement (outcome = Pauli choices and
/// results, `6^n` outcomes) plus Alice's accept operator for each outcome.
///
/// The twirl is dropped: the Pauli-averaged accept operator is already
/// `U (x) U` invariant, so acceptance probabilities are unchanged.
pub fn compiled_singlet_test(n: usize, target: BellKind) -> (QcChannel, Vec<CMatrix>) {
    let choices = pauli_choices(n);
    let w = 1.0 / choices.len() as f64;
    let mut bob = Vec::new();
    let mut alice = Vec::new();
    let bob_fix = match target {
        BellKind::Singlet => CMatrix::identity(2, 2),
        BellKind::PhiPlus => xz(),
    };
    for c in &choices {
        for outcome in 0..(1usize << n) {
            let bits = linalg::digits(outcome, &vec![2; n]);
            let mut b = CMatrix::identity(1, 1);
            let mut a = CMatrix::identity(1, 1);
            for (i, &p) in c.iter().enumerate() {
                // Bob measures P after his fixed correction; Alice accepts the opposite result
                let pb = bob_fix.adjoint() * p.projector(bits[i]) * &bob_fix;
                b = linalg::kron(&b, &pb);
                a = linalg::kron(&a, &p.projector(1 - bits[i]));
            }
            bob.push(b.scale(w));
            alice.push(a);
        }
    }
    (QcChannel::new(Povm::from_parts_unchecked(bob)), alice)
}

/// Acceptance of the compiled one-way protocol on an operator `x` over `A..., B...`.
pub fn compiled_acceptance(x: &CMatrix, n: usize, target: BellKind) -> Result<f64> {
    let layout = RegisterLayout::qubits(2 * n);
    let (ch, alice) = compiled_singlet_test(n, target);
    let measured: Vec<usize> = (n..2 * n).collect();
    let (xp, da, db) = split_operator(x, &layout, &measured)?;
    Ok(ch
        .povm
        .elements()
        .iter()
        .zip(&alice)
        .map(|(e, a)| (a * contract_b(&xp, da, db, e)).trace().re)
        .sum())
}

/// `2 (1 - (2/3)^n)`: one-way LOCC distance from `n` maximally entangled qubit
/// pairs to the separable set.
pub fn locc_sep_bound(n: u32) -> f64 {
    2.0 * (1.0 - (2.0f64 / 3.0).powi(n as i32))
}

/// `2 (1 - 2^{-n/2})`: trace-distance lower bound from `F <= 2^{-n}` and Fuchs-van de Graaf.
pub fn fvg_sep_bound(n: u32) -> f64 {
    2.0 * (1.0 - 2f64.powf(-(n as f64) / 2.0))
}

/// `2 (1 - 2^{-2n})`: the corollary value as printed, kept for reporting only.
pub fn printed_corollary_bound(n: u32) -> f64 {
    2.0 * (1.0 - 2f64.powi(-2 * n as i32))
}

/// `2 - 2^{2 - n/2} - 2 sqrt(delta)`: no-instance distance used by the BQP/QMA reductions.
pub fn reduction_beta(n: u32, delta: f64) -> f64 {
    2.0 - 2f64.powf(2.0 - n as f64 / 2.0) - 2.0 * delta.sqrt()
}

/// Random product state `|a><a| (x) |b><b|` on `A..., B...` (used by probes).
pub fn random_product_pair<R: Rng + ?Sized>(n: usize, rng: &mut R) -> CMatrix {
    let a = linalg::random_unit_vector(1 << n, rng);
    let b = linalg::random_unit_vector(1 << n, rng);
    linalg::projector(&linalg::kron_vec(&a, &b))
}
