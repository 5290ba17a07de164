//! Verifier harnesses: the k-extension QMA verifier, the QMA(2) swap-test verifier and
//! the two-prover SQG round, with honest provers and operator-level soundness probes.

use serde::{Deserialize, Serialize};

use crate::circuit::{Circuit, Gate};
use crate::error::{Error, Result};
use crate::linalg::{self, CMatrix, CVector};
use crate::outcome::ProtocolOutcome;
use crate::rng_for;
use crate::separability::{
    copy_symmetric_projector, extended_layout, k_extension_parties, max_product_expectation, PartySpace, ProductEnsemble,
    SeesawParams,
};
use crate::state::{trace_dist, Cut, DensityMatrix, Povm, PureState, RegisterLayout};

/// How a prover plays.
#[derive(Debug, Clone)]
pub enum ProverStrategy {
    HonestWitness(DensityMatrix),
    AdversarialSeesaw(SeesawParams),
    FixedState(DensityMatrix),
    FixedMeasurement(Povm),
}

fn all_parties(cut: &Cut) -> Vec<usize> {
    (0..cut.parties()).collect()
}

/// Witness layout for the QMA verifier: `S`, then copies `1..=k` of every output party.
pub fn qma_witness_layout(u: &Circuit, cut: &Cut, k: usize) -> Result<RegisterLayout> {
    let out = u.output_layout();
    let (ext, _) = extended_layout(&out, cut, &all_parties(cut), k + 1)?;
    let inp = u.input_layout();
    let mut dims = inp.dims().to_vec();
    let mut labels: Vec<String> = (0..inp.len()).map(|i| inp.label(i)).collect();
    for i in out.len()..ext.len() {
        dims.push(ext.dims()[i]);
        labels.push(ext.label(i));
    }
    RegisterLayout::with_labels(dims, labels)
}

/// `(U (x) I) W (U (x) I)^dagger` acting on the witness's `S` part.
fn apply_u_to_witness(u: &Circuit, witness: &DensityMatrix, ext: &RegisterLayout) -> Result<CMatrix> {
    let umat = u.matrix()?;
    let extra = witness.dim() / u.input_dim();
    let big = linalg::kron(&umat, &CMatrix::identity(extra, extra));
    let out = &big * witness.matrix() * big.adjoint();
    if out.nrows() != ext.dim() {
        return Err(Error::LayoutMismatch("witness does not match the extended output layout".into()));
    }
    Ok(out)
}

/// Exact acceptance of the k-extension verifier: apply `U` to `S`, then one permutation
/// test per party over `(A_i, A_i^1, ..., A_i^k)`.
pub fn qma_sep_verifier(u: &Circuit, cut: &Cut, witness: &DensityMatrix, k: usize) -> Result<ProtocolOutcome> {
    let out = u.output_layout();
    cut.check_layout(&out)?;
    let want = qma_witness_layout(u, cut, k)?;
    if witness.layout().dims() != want.dims() {
        return Err(Error::LayoutMismatch(format!(
            "witness dims {:?}, expected {:?}",
            witness.layout().dims(),
            want.dims()
        )));
    }
    let (ext, pi) = copy_symmetric_projector(&out, cut, &all_parties(cut), k + 1)?;
    let m = apply_u_to_witness(u, witness, &ext)?;
    let p = (&pi * m).trace().re;
    Ok(ProtocolOutcome::exact(p, format!("{} permutation tests over {} copies", cut.parties(), k + 1)))
}

/// Honest witness: the (k+1)-copy extension of the claimed separable output, pulled
/// back through `U` after Uhlmann-aligning the purification of `U rho U^dagger` with it.
pub fn honest_qma_witness(u: &Circuit, cut: &Cut, rho: &DensityMatrix, ens: &ProductEnsemble, k: usize) -> Result<DensityMatrix> {
    let out = u.output_layout();
    let xi = k_extension_parties(ens, &out, cut, &all_parties(cut), k + 1)?;
    let image = u.run_mixed(rho)?;
    let da = out.dim();
    let de = xi.dim() / da;
    // purifications as coefficient matrices: rows index A, columns index the rest
    let purif = |m: &CMatrix| -> CMatrix {
        let (vals, vecs) = linalg::eigh(m);
        let keep: Vec<usize> = (0..vals.len()).filter(|&j| vals[j] > 1e-14).collect();
        let mut c = CMatrix::zeros(m.nrows(), keep.len().max(1));
        for (jj, &j) in keep.iter().enumerate() {
            for a in 0..m.nrows() {
                c[(a, jj)] = vecs[(a, j)] * vals[j].sqrt();
            }
        }
        c
    };
    // |Xi> on A (x) (E R): reshape the (A E) x r purification into A x (E r)
    let xp = purif(xi.matrix());
    let r = xp.ncols();
    let mut x = CMatrix::zeros(da, de * r);
    for a in 0..da {
        for e in 0..de {
            for j in 0..r {
                x[(a, e * r + j)] = xp[(a * de + e, j)];
            }
        }
    }
    let z = purif(image.matrix());
    if z.ncols() > de * r {
        return Err(Error::InvalidArgument("extension too small to hold the purification".into()));
    }
    // maximise |Tr(M Y)| over co-isometries Y, M = X^dagger Z
    let mm = x.adjoint() * &z;
    let svd = mm.svd(true, true);
    let (mu, mvt) = (svd.u.unwrap(), svd.v_t.unwrap());
    let y = mvt.adjoint() * mu.adjoint();
    let aligned = &z * &y; // A x (E R)
    // Omega = Tr_R of the aligned vector
    let mut omega = CMatrix::zeros(da * de, da * de);
    for j in 0..r {
        let v = CVector::from_iterator(da * de, (0..da).flat_map(|a| (0..de).map(move |e| (a, e))).map(|(a, e)| aligned[(a, e * r + j)]));
        omega += &v * v.adjoint();
    }
    let umat = u.matrix()?;
    let back = linalg::kron(&umat, &CMatrix::identity(de, de));
    let w = back.adjoint() * omega * &back;
    let t = w.trace().re;
    let layout = qma_witness_layout(u, cut, k)?;
    DensityMatrix::new(linalg::hermitize(&w.unscale(t)), layout)
}

/// Acceptance of the swap test between `U|psi>` and the claimed product `|phi_1>...|phi_l>`.
pub fn qma2_verifier(u: &Circuit, cut: &Cut, psi: &PureState, claim: &[PureState]) -> Result<ProtocolOutcome> {
    let out = u.run_pure(psi)?;
    let product = assemble_product(out.layout(), cut, claim)?;
    let ov = product.dotc(out.vector()).norm_sqr();
    Ok(ProtocolOutcome::exact(0.5 + 0.5 * ov, "swap test against claimed product"))
}

/// Product vector on `layout` from per-party factors.
pub fn assemble_product(layout: &RegisterLayout, cut: &Cut, claim: &[PureState]) -> Result<CVector> {
    let ps = PartySpace::new(layout, cut)?;
    if claim.len() != ps.pd.len() || claim.iter().zip(&ps.pd).any(|(c, &d)| c.dim() != d) {
        return Err(Error::LayoutMismatch("one claimed factor per party with the party dimension".into()));
    }
    let mut v = CVector::from_element(1, linalg::ONE);
    for c in claim {
        v = linalg::kron_vec(&v, c.vector());
    }
    Ok(ps.vec_from_party(&v))
}

/// Coin of the SQG verifier.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Coin {
    Zero,
    One,
    Random,
}

/// Layout of the yes-prover's message: `k` copies of every party of `rho`.
pub fn sqg_yes_layout(rho: &DensityMatrix, cut: &Cut, k: usize) -> Result<RegisterLayout> {
    Ok(extended_layout(rho.layout(), cut, &all_parties(cut), k)?.0)
}

/// Detailed SQG round.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SqgRound {
    pub outcome: ProtocolOutcome,
    /// Probability that the yes-prover's registers pass every permutation test.
    pub pass_probability: f64,
    /// Probability that the no-prover guesses the coin wrongly, given the test passed.
    pub confusion: f64,
}

/// One SQG round, exact: permutation tests on the yes-prover's `k` copies of each party,
/// keep the first copy `sigma`, send `rho` (coin 0) or `sigma` (coin 1) to the no-prover's
/// fixed two-outcome measurement, and reject iff it names the coin.
pub fn sqg_round(rho: &DensityMatrix, cut: &Cut, yes_state: &DensityMatrix, no_meas: &Povm, k: usize, coin: Coin) -> Result<SqgRound> {
    let (ext, pi) = copy_symmetric_projector(rho.layout(), cut, &all_parties(cut), k)?;
    if yes_state.layout().dims() != ext.dims() {
        return Err(Error::LayoutMismatch(format!(
            "yes-prover state dims {:?}, expected {:?}",
            yes_state.layout().dims(),
            ext.dims()
        )));
    }
    if no_meas.len() != 2 || no_meas.dim() != rho.dim() {
        return Err(Error::InvalidPovm("no-prover needs a two-outcome measurement on the party space".into()));
    }
    let post = &pi * yes_state.matrix() * &pi;
    let pass = post.trace().re.clamp(0.0, 1.0);
    let wrong = |b: usize, sigma: Option<&CMatrix>| -> f64 {
        let e = &no_meas.elements()[1 - b];
        match b {
            0 => (e * rho.matrix()).trace().re,
            _ => (e * sigma.unwrap()).trace().re,
        }
    };
    let confusion = if pass < 1e-14 {
        0.0
    } else {
        let keep: Vec<usize> = (0..rho.layout().len()).collect();
        let sigma = linalg::partial_trace(&post, ext.dims(), &keep).unscale(pass);
        match coin {
            Coin::Zero => wrong(0, None),
            Coin::One => wrong(1, Some(&sigma)),
            Coin::Random => 0.5 * wrong(0, None) + 0.5 * wrong(1, Some(&sigma)),
        }
    };
    let p = pass * confusion;
    Ok(SqgRound {
        outcome: ProtocolOutcome::exact(p, format!("coin {coin:?}, {k} copies per party")),
        pass_probability: pass,
        confusion,
    })
}

/// The post-test marginal `sigma` the verifier keeps, if the test can pass.
pub fn sqg_kept_marginal(rho: &DensityMatrix, cut: &Cut, yes_state: &DensityMatrix, k: usize) -> Result<Option<DensityMatrix>> {
    let (_, pi) = copy_symmetric_projector(rho.layout(), cut, &all_parties(cut), k)?;
    let post = &pi * yes_state.matrix() * &pi;
    let pass = post.trace().re;
    if pass < 1e-14 {
        return Ok(None);
    }
    let keep: Vec<usize> = (0..rho.layout().len()).collect();
    let m = linalg::partial_trace(&post, yes_state.layout().dims(), &keep).unscale(pass);
    Ok(Some(DensityMatrix::new(linalg::hermitize(&m), rho.layout().clone())?))
}

/// Honest yes-prover: the k-copy extension of a separable ensemble.
pub fn honest_sqg_state(ens: &ProductEnsemble, rho: &DensityMatrix, cut: &Cut, k: usize) -> Result<DensityMatrix> {
    k_extension_parties(ens, rho.layout(), cut, &all_parties(cut), k)
}

/// Soundness ceiling `1 - (beta - eps)^2 / 4` of the separability verifier. `eps` is the
/// slack between k-extendible and separable states and must satisfy
/// `sqrt(alpha) < (beta - eps)^2 / 4`, which keeps the ceiling below completeness `1 - sqrt(alpha)`.
pub fn qma_sep_soundness(alpha: f64, beta: f64, eps: f64) -> Result<f64> {
    if !(0.0..=2.0).contains(&alpha) || !(0.0..=2.0).contains(&beta) || !(eps > 0.0 && eps < beta) {
        return Err(Error::InvalidArgument(format!("need alpha, beta in [0, 2] and 0 < eps < beta; got {alpha}, {beta}, {eps}")));
    }
    let gap = (beta - eps).powi(2) / 4.0;
    if alpha.sqrt() >= gap {
        return Err(Error::InvalidArgument(format!("slack too large: sqrt(alpha) = {} >= (beta - eps)^2 / 4 = {gap}", alpha.sqrt())));
    }
    Ok(1.0 - gap)
}

/// Uninformative no-prover: guesses each coin value with probability 1/2.
pub fn random_guess(d: usize) -> Povm {
    Povm::coin(d)
}

/// Protocol instance the soundness probe can optimise against.
#[derive(Debug, Clone)]
pub enum ProbeTarget {
    /// Maximise swap-test acceptance over inputs and claimed products.
    Qma2 { u: Circuit, cut: Cut },
    /// Maximise the k-extension verifier's acceptance over all witnesses.
    QmaSep { u: Circuit, cut: Cut, k: usize },
    /// Maximise the yes-prover's acceptance against a fixed no-prover measurement.
    Sqg { rho: DensityMatrix, cut: Cut, k: usize, no_meas: Povm },
    /// Maximise acceptance of a single-witness decision circuit.
    Decision { circuit: Circuit, decision: String, accept: usize },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ProbeResult {
    /// Best acceptance found (a lower bound on the optimum).
    pub best: f64,
    /// Best acceptance per seed.
    pub per_seed: Vec<f64>,
}

/// Leading eigenpair refined from a seeded random start by power iteration on the
/// shifted operator, after an exact eigendecomposition seeds the comparison.
fn seeded_rayleigh(op: &CMatrix, seed: u64, iters: usize) -> f64 {
    let mut rng = rng_for(seed, 0);
    let n = op.nrows();
    let shifted = op + CMatrix::identity(n, n).scale(op.norm());
    let mut v = linalg::random_unit_vector(n, &mut rng);
    for _ in 0..iters {
        v = linalg::normalize(&(&shifted * &v));
    }
    (v.adjoint() * op * &v)[(0, 0)].re
}

/// Numerical soundness probe. Operator-valued targets use the exact leading eigenvalue
/// of the acceptance operator, plus a seeded power iteration per seed; the swap-test
/// target runs a product seesaw per seed.
pub fn adversarial_probe(target: &ProbeTarget, seeds: &[u64], iters: usize) -> Result<ProbeResult> {
    let seeds = if seeds.is_empty() { &[0u64][..] } else { seeds };
    let op = match target {
        ProbeTarget::Qma2 { u, cut } => {
            let m = u.matrix()?;
            let range = &m * m.adjoint();
            let layout = u.output_layout();
            let per_seed = seeds
                .iter()
                .map(|&s| {
                    max_product_expectation(&range, &layout, cut, &SeesawParams { restarts: 4, iters, seed: s })
                        .map(|r| 0.5 + 0.5 * r.value)
                })
                .collect::<Result<Vec<_>>>()?;
            let best = per_seed.iter().copied().fold(0.0, f64::max);
            return Ok(ProbeResult { best, per_seed });
        }
        ProbeTarget::QmaSep { u, cut, k } => {
            let out = u.output_layout();
            let (_, pi) = copy_symmetric_projector(&out, cut, &all_parties(cut), k + 1)?;
            let umat = u.matrix()?;
            let extra = pi.nrows() / out.dim();
            let big = linalg::kron(&umat, &CMatrix::identity(extra, extra));
            big.adjoint() * pi * big
        }
        ProbeTarget::Sqg { rho, cut, k, no_meas } => {
            let (ext, pi) = copy_symmetric_projector(rho.layout(), cut, &all_parties(cut), *k)?;
            let m1 = (&no_meas.elements()[1] * rho.matrix()).trace().re;
            let extra = ext.dim() / rho.dim();
            let m0 = linalg::kron(&no_meas.elements()[0], &CMatrix::identity(extra, extra));
            (&pi).scale(0.5 * m1) + (&pi * m0 * &pi).scale(0.5)
        }
        ProbeTarget::Decision { circuit, decision, accept } => {
            let m = circuit.matrix()?;
            let layout = circuit.output_layout();
            let di = layout
                .index_of(decision)
                .ok_or_else(|| Error::InvalidArgument(format!("no register `{decision}`")))?;
            let st = linalg::strides(layout.dims());
            let mut p = CMatrix::zeros(layout.dim(), layout.dim());
            for i in 0..layout.dim() {
                if (i / st[di]) % layout.dims()[di] == *accept {
                    p[(i, i)] = linalg::ONE;
                }
            }
            m.adjoint() * p * m
        }
    };
    let op = linalg::hermitize(&op);
    let exact = linalg::lambda_max(&op);
    let per_seed: Vec<f64> = seeds.iter().map(|&s| seeded_rayleigh(&op, s, iters).max(0.0).min(exact)).collect();
    Ok(ProbeResult { best: exact.clamp(0.0, 1.0), per_seed })
}

/// A planted separable-output instance: unitary `U` on two qubits, a separable
/// ensemble `sigma`, and an input `rho` with `||U rho U^dagger - sigma||_1 = alpha`.
#[derive(Debug, Clone)]
pub struct PlantedIsometry {
    pub u: Circuit,
    pub cut: Cut,
    pub rho: DensityMatrix,
    pub ensemble: ProductEnsemble,
    pub alpha: f64,
}

/// Builds a planted instance by mixing `sigma` with a maximally entangled state.
pub fn planted_separable_isometry(seed: u64, alpha: f64, ensemble_size: usize) -> Result<PlantedIsometry> {
    let mut rng = rng_for(seed, 0);
    let layout = RegisterLayout::with_labels(vec![2, 2], vec!["A1".into(), "A2".into()])?;
    let cut = Cut::finest(2);
    let ens = ProductEnsemble::random(&[2, 2], ensemble_size.max(1), &mut rng);
    let sigma = ens.state(&layout, &cut)?;
    let phi = crate::state::max_entangled(1, crate::state::BellKind::PhiPlus)?.to_density()?;
    let gap = linalg::trace_norm_hermitian(&(phi.matrix() - sigma.matrix()));
    let t = if alpha == 0.0 { 0.0 } else { alpha / gap };
    if t > 1.0 {
        return Err(Error::InvalidArgument("alpha too large for the planted family".into()));
    }
    let target = sigma.matrix().scale(1.0 - t) + phi.matrix().scale(t);
    let umat = linalg::random_unitary(4, &mut rng);
    let mut u = Circuit::on_qubits(&["A1", "A2"]);
    u.push(Gate::unitary(umat.clone(), &["A1", "A2"]))?;
    let rho = DensityMatrix::new(linalg::hermitize(&(umat.adjoint() * target * &umat)), u.input_layout())?;
    let image = u.run_mixed(&rho)?;
    let measured = trace_dist(&image, &sigma.with_layout(image.layout().clone())?)?;
    Ok(PlantedIsometry { u, cut, rho, ensemble: ens, alpha: measured })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn soundness_slack_is_validated() {
        let b = qma_sep_soundness(0.01, 1.5, 0.1).unwrap();
        assert!((b - (1.0 - 1.4f64.powi(2) / 4.0)).abs() < 1e-15);
        assert!(b < 1.0 - 0.01f64.sqrt());
        assert!(qma_sep_soundness(0.5, 1.0, 0.2).is_err());
        assert!(qma_sep_soundness(0.0, 1.0, 1.0).is_err());
        assert!(qma_sep_soundness(0.0, 1.0, 0.0).is_err());
    }
    use crate::separability::nearest_pure_product;
    use crate::state::{helstrom, max_entangled, BellKind};

    #[test]
    fn honest_witness_exact_case() {
        let inst = planted_separable_isometry(1, 0.0, 2).unwrap();
        for k in [1, 2] {
            let w = honest_qma_witness(&inst.u, &inst.cut, &inst.rho, &inst.ensemble, k).unwrap();
            let p = qma_sep_verifier(&inst.u, &inst.cut, &w, k).unwrap().value();
            assert!((p - 1.0).abs() < 1e-9, "k={k}: {p}");
        }
    }

    #[test]
    fn honest_witness_planted() {
        for alpha in [0.01, 0.04] {
            let inst = planted_separable_isometry(2, alpha, 3).unwrap();
            assert!((inst.alpha - alpha).abs() < 1e-9);
            let w = honest_qma_witness(&inst.u, &inst.cut, &inst.rho, &inst.ensemble, 2).unwrap();
            let p = qma_sep_verifier(&inst.u, &inst.cut, &w, 2).unwrap().value();
            assert!(p >= 1.0 - alpha.sqrt() - 1e-6, "{alpha}: {p}");
        }
    }

    #[test]
    fn qma2_values() {
        let mut u = Circuit::on_qubits(&["a", "b"]);
        u.push(Gate::h("a")).unwrap();
        let cut = Cut::finest(2);
        let psi = PureState::basis(u.input_layout(), 0).unwrap();
        let plus = PureState::new(CVector::from_vec(vec![linalg::c(0.5f64.sqrt(), 0.), linalg::c(0.5f64.sqrt(), 0.)]), RegisterLayout::qubits(1)).unwrap();
        let zero = PureState::basis(RegisterLayout::qubits(1), 0).unwrap();
        let one = PureState::basis(RegisterLayout::qubits(1), 1).unwrap();
        let p = qma2_verifier(&u, &cut, &psi, &[plus.clone(), zero.clone()]).unwrap().value();
        assert!((p - 1.0).abs() < 1e-12);
        let p = qma2_verifier(&u, &cut, &psi, &[plus, one]).unwrap().value();
        assert!((p - 0.5).abs() < 1e-12);
        let probe = adversarial_probe(&ProbeTarget::Qma2 { u, cut }, &[1, 2], 50).unwrap();
        assert!((probe.best - 1.0).abs() < 1e-9);
    }

    #[test]
    fn qma2_probe_on_entangler() {
        let mut u = Circuit::on_qubits(&["a", "b"]);
        u.push(Gate::h("a")).unwrap();
        u.push(Gate::cnot("a", "b")).unwrap();
        let cut = Cut::finest(2);
        // every output is in the range, so the probe reaches 1
        let probe = adversarial_probe(&ProbeTarget::Qma2 { u: u.clone(), cut: cut.clone() }, &[3], 50).unwrap();
        assert!((probe.best - 1.0).abs() < 1e-9);
        let psi = PureState::basis(u.input_layout(), 0).unwrap();
        let out = u.run_pure(&psi).unwrap();
        let r = nearest_pure_product(&out, &cut, &SeesawParams::default()).unwrap();
        assert!((r.overlap - 0.5).abs() < 1e-9);
    }

    #[test]
    fn sqg_examples() {
        let layout = RegisterLayout::qubits(2);
        let cut = Cut::finest(2);
        let mut rng = rng_for(4, 0);
        let ens = ProductEnsemble::random(&[2, 2], 2, &mut rng);
        let rho = ens.state(&layout, &cut).unwrap();
        let yes = honest_sqg_state(&ens, &rho, &cut, 2).unwrap();
        let r = sqg_round(&rho, &cut, &yes, &random_guess(4), 2, Coin::Random).unwrap();
        assert!((r.outcome.value() - 0.5).abs() < 1e-12);
        let a = sqg_round(&rho, &cut, &yes, &random_guess(4), 2, Coin::Zero).unwrap().outcome.value();
        let b = sqg_round(&rho, &cut, &yes, &random_guess(4), 2, Coin::One).unwrap().outcome.value();
        assert!((0.5 * (a + b) - r.outcome.value()).abs() < 1e-12);

        let phi = max_entangled(1, BellKind::PhiPlus).unwrap().to_density().unwrap();
        let sigma = sqg_kept_marginal(&phi, &cut, &yes, 2).unwrap().unwrap();
        let (h, _) = helstrom(&phi, &sigma).unwrap();
        let p = sqg_round(&phi, &cut, &yes, &h, 2, Coin::Random).unwrap().outcome.value();
        let gap = trace_dist(&phi, &sigma).unwrap();
        assert!(p <= 0.5 - gap / 4.0 + 1e-9);
        let probe = adversarial_probe(&ProbeTarget::Sqg { rho: phi, cut, k: 2, no_meas: h }, &[1], 100).unwrap();
        assert!(probe.best >= p - 1e-9 && probe.best <= 1.0);
    }

    #[test]
    fn decision_probe() {
        let v = crate::reductions::toys::accept_all_ones(2);
        let r = adversarial_probe(
            &ProbeTarget::Decision { circuit: v.circuit, decision: v.decision, accept: v.accept },
            &[1, 2],
            100,
        )
        .unwrap();
        assert!((r.best - 1.0).abs() < 1e-12);
    }

    #[test]
    fn degenerate_single_party_test() {
        // one party, one extension copy: the verifier is a swap test of U S against its copy
        let u = Circuit::on_qubits(&["a"]);
        let cut = Cut::new(vec![vec![0]], 1).unwrap();
        let layout = qma_witness_layout(&u, &cut, 1).unwrap();
        assert_eq!(layout.dims(), &[2, 2]);
        let w = PureState::basis(layout, 1).unwrap().to_density().unwrap();
        let p = qma_sep_verifier(&u, &cut, &w, 1).unwrap().value();
        assert!((p - 0.5).abs() < 1e-12);
    }
}
