//! Property tests for the invariants each module promises.

use proptest::prelude::*;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use septest_core::circuit::{Circuit, Control, Gate, Register};
use septest_core::linalg::{self, CMatrix};
use septest_core::locc::{compiled_singlet_test, locc_norm_lower, locc_sep_bound, singlet_test_analytic};
use septest_core::protocols::{
    adversarial_probe, honest_sqg_state, qma2_verifier, qma_sep_soundness, random_guess, sqg_round, sqg_yes_layout, Coin, ProbeTarget,
};
use septest_core::reductions::{pure_from_separable, reduce_bqp, reduce_qma, toys, DecisionCircuit};
use septest_core::report::report_suite;
use septest_core::separability::{
    copy_symmetric_projector, k_ext_feasible, k_extension_parties, nearest_pure_product, nearest_separable,
    verify_extension, Extend, NearestSeparableParams, ProductEnsemble, SeesawParams,
};
use septest_core::spectests::{
    permutation_test, permutation_test_circuit_prob, permutation_test_prob, product_test_circuit_prob, product_test_prob,
    swap_test_circuit_prob, swap_test_prob,
};
use septest_core::state::{fidelity_pure, pairs_cut, trace_dist};
use septest_core::{
    fidelity, helstrom, max_entangled, rng_for, trace_norm, BellKind, Cut, DensityMatrix, PureState, RegisterLayout,
};

fn rng(seed: u64) -> ChaCha8Rng {
    rng_for(seed, 0)
}

fn config(cases: u32) -> ProptestConfig {
    ProptestConfig { cases, ..ProptestConfig::default() }
}

fn random_circuit(r: &mut ChaCha8Rng) -> Circuit {
    let mut c = Circuit::new(
        vec![Register::new("q0", 2), Register::new("q1", 3), Register::new("q2", 2)],
        vec![Register::new("a", 2)],
    )
    .unwrap();
    let labels = ["q0", "q1", "q2", "a"];
    for _ in 0..8 {
        let g = match r.random_range(0..5) {
            0 => Gate::h(["q0", "q2", "a"][r.random_range(0..3)]),
            1 => Gate::cnot("q0", "a"),
            2 => Gate::qft("q1"),
            3 => Gate::swap("q2", "a").controlled(Control::equals("q1", r.random_range(0..3))),
            _ => {
                let t = labels[r.random_range(0..4)];
                let d = if t == "q1" { 3 } else { 2 };
                Gate::unitary(linalg::random_unitary(d, r), &[t])
            }
        };
        c.push(g).unwrap();
    }
    c
}

proptest! {
    #![proptest_config(config(48))]

    #[test]
    fn distance_inequalities(seed in any::<u64>()) {
        let mut r = rng(seed);
        let layout = RegisterLayout::qubits(2);
        let rho = DensityMatrix::random(layout.clone(), r.random_range(1..=4), &mut r);
        let sigma = DensityMatrix::random(layout.clone(), r.random_range(1..=4), &mut r);
        let t = trace_dist(&rho, &sigma).unwrap() / 2.0;
        let f = fidelity(&rho, &sigma).unwrap();
        prop_assert!(1.0 - f.sqrt() <= t + 1e-9);
        prop_assert!(t <= (1.0 - f).max(0.0).sqrt() + 1e-9);

        // measurement statistics move by at most half the trace distance
        let h = linalg::random_hermitian(4, &mut r);
        let (vals, vecs) = linalg::eigh(&h);
        let pi = linalg::spectral_map(&vals, &vecs, |x| if x > 0.0 { 1.0 } else { 0.0 });
        prop_assert!(rho.expectation(&pi) >= sigma.expectation(&pi) - t - 1e-9);

        let (_, success) = helstrom(&rho, &sigma).unwrap();
        prop_assert!((success - (0.5 + t / 2.0)).abs() < 1e-10);
    }

    #[test]
    fn partial_trace_contracts_trace_norm(seed in any::<u64>()) {
        let mut r = rng(seed);
        let x = linalg::random_hermitian(12, &mut r);
        let reduced = linalg::partial_trace(&x, &[3, 4], &[0]);
        prop_assert!(trace_norm(&reduced).unwrap() <= trace_norm(&x).unwrap() + 1e-9);
    }

    #[test]
    fn pure_state_trace_distance(seed in any::<u64>()) {
        let mut r = rng(seed);
        let layout = RegisterLayout::new(vec![3]).unwrap();
        let a = PureState::random(layout.clone(), &mut r);
        let b = PureState::random(layout, &mut r);
        let ov = a.overlap(&b).unwrap();
        let d = trace_dist(&a.to_density().unwrap(), &b.to_density().unwrap()).unwrap();
        prop_assert!((d - 2.0 * (1.0 - ov).max(0.0).sqrt()).abs() < 1e-10);
        let f = fidelity_pure(&a, &b.to_density().unwrap()).unwrap();
        prop_assert!((f - ov).abs() < 1e-10);
    }

    #[test]
    fn circuits_are_isometries_and_round_trip(seed in any::<u64>()) {
        let mut r = rng(seed);
        let c = random_circuit(&mut r);
        prop_assert!(c.check_isometry().unwrap() < 1e-9);
        let psi = PureState::random(c.input_layout(), &mut r);
        let pure = c.run_pure(&psi).unwrap().to_density().unwrap();
        let mixed = c.run_mixed(&psi.to_density().unwrap()).unwrap();
        prop_assert!(linalg::max_abs(&(pure.matrix() - mixed.matrix())) < 1e-10);
        let text = c.to_json();
        let back = Circuit::from_json(&text).unwrap();
        prop_assert_eq!(&back, &c);
        prop_assert_eq!(back.to_json(), text);
    }

    #[test]
    fn test_circuits_match_analytic(seed in any::<u64>()) {
        let mut r = rng(seed);
        let layout = RegisterLayout::new(vec![2]).unwrap();
        let a = PureState::random(layout.clone(), &mut r);
        let b = PureState::random(layout, &mut r);
        prop_assert!((swap_test_prob(&a, &b).unwrap() - swap_test_circuit_prob(&a, &b).unwrap()).abs() < 1e-9);

        let rho = DensityMatrix::random(RegisterLayout::qubits(3), r.random_range(1..=8), &mut r);
        let p = permutation_test_prob(&rho, &[0, 1, 2]).unwrap();
        prop_assert!((p - permutation_test_circuit_prob(&rho, &[0, 1, 2]).unwrap()).abs() < 1e-9);

        let psi = PureState::random(RegisterLayout::new(vec![2, 3]).unwrap(), &mut r);
        let cut = Cut::finest(2);
        prop_assert!((product_test_prob(&psi, &cut).unwrap() - product_test_circuit_prob(&psi, &cut).unwrap()).abs() < 1e-9);
    }

    #[test]
    fn permutation_post_state_is_symmetric(seed in any::<u64>()) {
        let mut r = rng(seed);
        let rho = DensityMatrix::random(RegisterLayout::qubits(3), r.random_range(1..=8), &mut r);
        let out = permutation_test(&rho, &[0, 1, 2]).unwrap();
        let cut = Cut::new(vec![vec![0]], 1).unwrap();
        let (_, pi) = copy_symmetric_projector(&RegisterLayout::qubits(1), &cut, &[0], 3).unwrap();
        let projected = &pi * out.post_state.matrix() * &pi;
        prop_assert!(linalg::max_abs(&(projected - out.post_state.matrix())) < 1e-9);
    }

    #[test]
    fn product_test_band_on_random_states(seed in any::<u64>()) {
        let mut r = rng(seed);
        let psi = PureState::random(RegisterLayout::new(vec![2, 2, 2]).unwrap(), &mut r);
        let cut = Cut::finest(3);
        let near = nearest_pure_product(&psi, &cut, &SeesawParams { restarts: 8, iters: 300, seed }).unwrap();
        let eps = 1.0 - near.overlap;
        let p = product_test_prob(&psi, &cut).unwrap();
        // the seesaw overestimates eps, so only the lower edge is checked here
        prop_assert!(p >= 1.0 - 2.0 * eps - 1e-7);
    }

    #[test]
    fn bipartite_overlap_is_top_schmidt_coefficient(seed in any::<u64>()) {
        let mut r = rng(seed);
        let psi = PureState::random(RegisterLayout::new(vec![3, 4]).unwrap(), &mut r);
        let m = CMatrix::from_row_slice(3, 4, psi.vector().as_slice());
        let top = m.singular_values()[0].powi(2);
        let near = nearest_pure_product(&psi, &Cut::finest(2), &SeesawParams::default()).unwrap();
        prop_assert!((near.overlap - top).abs() < 1e-9);
    }

    #[test]
    fn separable_states_pass_singlet_test_bound(seed in any::<u64>(), n in 1usize..=3) {
        let mut r = rng(seed);
        let pd = 1usize << n;
        let ens = ProductEnsemble::random(&[pd, pd], r.random_range(1..=4), &mut r);
        let rho = ens.state(&RegisterLayout::qubits(2 * n), &pairs_cut(n)).unwrap();
        prop_assert!(singlet_test_analytic(&rho).unwrap() <= (2.0f64 / 3.0).powi(n as i32) + 1e-9);
    }

    #[test]
    fn qc_norm_is_below_trace_norm(seed in any::<u64>()) {
        let mut r = rng(seed);
        let x = linalg::random_hermitian(4, &mut r);
        let (ch, _) = compiled_singlet_test(1, BellKind::Singlet);
        let lower = locc_norm_lower(&x, &RegisterLayout::qubits(2), &[1], &ch).unwrap();
        prop_assert!(lower <= trace_norm(&x).unwrap() + 1e-9);
    }

    #[test]
    fn compiled_test_separates_phi_plus(seed in any::<u64>(), n in 1usize..=2) {
        let mut r = rng(seed);
        let pd = 1usize << n;
        let layout = RegisterLayout::qubits(2 * n);
        let ens = ProductEnsemble::random(&[pd, pd], r.random_range(1..=4), &mut r);
        let sigma = ens.state(&layout, &pairs_cut(n)).unwrap();
        let phi = max_entangled(n, BellKind::PhiPlus).unwrap().to_density().unwrap();
        let (ch, _) = compiled_singlet_test(n, BellKind::PhiPlus);
        let measured: Vec<usize> = (n..2 * n).collect();
        let x = phi.matrix() - sigma.matrix();
        let v = locc_norm_lower(&x, &layout, &measured, &ch).unwrap();
        prop_assert!(v >= locc_sep_bound(n as u32) - 1e-6);
    }
}

proptest! {
    #![proptest_config(config(12))]

    #[test]
    fn separable_states_are_extendible(seed in any::<u64>(), k in 2usize..=3) {
        let mut r = rng(seed);
        let layout = RegisterLayout::qubits(2);
        let cut = Cut::finest(2);
        let ens = ProductEnsemble::random(&[2, 2], r.random_range(1..=3), &mut r);
        let rho = ens.state(&layout, &cut).unwrap();
        let ext = k_extension_parties(&ens, &layout, &cut, &[0, 1], k).unwrap();
        let check = verify_extension(&rho, &cut, k, &Extend::AllParties, &ext).unwrap();
        prop_assert!(check.marginal_error < 1e-10 && check.symmetry_error < 1e-10 && check.min_eigenvalue > -1e-10);
        let (_, pi) = copy_symmetric_projector(&layout, &cut, &[0, 1], k).unwrap();
        prop_assert!(((&pi * ext.matrix()).trace().re - 1.0).abs() < 1e-10);
        let feas = k_ext_feasible(&rho, &cut, k, &Extend::AllParties, 500, Some(&ext)).unwrap();
        prop_assert!(feas.feasible);
    }

    #[test]
    fn extendibility_hierarchy(seed in any::<u64>()) {
        let mut r = rng(seed);
        let cut = Cut::finest(2);
        let rho = DensityMatrix::random(RegisterLayout::qubits(2), 4, &mut r);
        let three = k_ext_feasible(&rho, &cut, 3, &Extend::Party(1), 3000, None).unwrap();
        if three.feasible {
            let two = k_ext_feasible(&rho, &cut, 2, &Extend::Party(1), 3000, None).unwrap();
            prop_assert!(two.feasible, "3-extendible but 2-residual {}", two.residual);
        }
    }

    #[test]
    fn nearest_separable_respects_fidelity_bound(seed in any::<u64>()) {
        let mut r = rng(seed);
        let u = linalg::kron(&linalg::random_unitary(2, &mut r), &linalg::random_unitary(2, &mut r));
        let phi = max_entangled(1, BellKind::PhiPlus).unwrap().to_density().unwrap();
        let rho = DensityMatrix::new(linalg::hermitize(&(&u * phi.matrix() * u.adjoint())), phi.layout().clone()).unwrap();
        let params = NearestSeparableParams { ensemble_size: None, restarts: 2, iters: 100, seed };
        let near = nearest_separable(&rho, &pairs_cut(1), &params).unwrap();
        prop_assert!(near.distance >= 2.0 * (1.0 - 0.5f64.sqrt()) - 1e-9);
    }

    #[test]
    fn separable_isometry_to_pure_product(seed in any::<u64>(), t in 0.0f64..0.05) {
        let mut r = rng(seed);
        let layout = RegisterLayout::qubits(2);
        let cut = Cut::finest(2);
        let ens = ProductEnsemble::random(&[2, 2], 2, &mut r);
        let sigma = ens.state(&layout, &cut).unwrap();
        let noise = DensityMatrix::random(layout.clone(), 2, &mut r);
        let image = DensityMatrix::mixture(&[(1.0 - t, &sigma), (t, &noise)]).unwrap();
        let u = linalg::random_unitary(4, &mut r);
        let mut c = Circuit::on_qubits(&["q0", "q1"]);
        c.push(Gate::unitary(u.clone(), &["q0", "q1"])).unwrap();
        let rho = DensityMatrix::new(linalg::hermitize(&(u.adjoint() * image.matrix() * &u)), layout.clone()).unwrap();
        let alpha = trace_dist(&image, &sigma).unwrap();
        let out = pure_from_separable(&c, &rho, &ens, &cut, alpha).unwrap();
        prop_assert!(out.distance <= 4.0 * alpha.sqrt() + 1e-7);
        prop_assert!(out.distance <= out.average_distance + 1e-12);
    }

    #[test]
    fn qma2_mixtures_do_not_beat_pure_inputs(seed in any::<u64>()) {
        let mut r = rng(seed);
        let mut c = Circuit::on_qubits(&["a", "b"]);
        c.push(Gate::unitary(linalg::random_unitary(4, &mut r), &["a", "b"])).unwrap();
        let cut = Cut::finest(2);
        let claim = vec![
            PureState::random(RegisterLayout::qubits(1), &mut r),
            PureState::random(RegisterLayout::qubits(1), &mut r),
        ];
        let product = linalg::kron_vec(claim[0].vector(), claim[1].vector());
        let inputs: Vec<PureState> = (0..3).map(|_| PureState::random(c.input_layout(), &mut r)).collect();
        let best_pure = inputs.iter().map(|p| qma2_verifier(&c, &cut, p, &claim).unwrap().value()).fold(0.0, f64::max);
        let w = [0.5, 0.3, 0.2];
        let parts: Vec<DensityMatrix> = inputs.iter().map(|p| p.to_density().unwrap()).collect();
        let mix = DensityMatrix::mixture(&[(w[0], &parts[0]), (w[1], &parts[1]), (w[2], &parts[2])]).unwrap();
        let out = c.run_mixed(&mix).unwrap();
        let mixed = 0.5 + 0.5 * out.expectation(&linalg::projector(&product));
        prop_assert!(mixed <= best_pure + 1e-12);
    }

    #[test]
    fn sqg_round_is_coin_average(seed in any::<u64>()) {
        let mut r = rng(seed);
        let layout = RegisterLayout::qubits(2);
        let cut = Cut::finest(2);
        let rho = DensityMatrix::random(layout, 3, &mut r);
        let ext = sqg_yes_layout(&rho, &cut, 2).unwrap();
        let yes = DensityMatrix::random(ext, 2, &mut r);
        let h = linalg::random_hermitian(4, &mut r);
        let (vals, vecs) = linalg::eigh(&h);
        let e0 = linalg::spectral_map(&vals, &vecs, |x| if x > 0.0 { 1.0 } else { 0.0 });
        let meas = septest_core::Povm::new(vec![e0.clone(), CMatrix::identity(4, 4) - e0], None).unwrap();
        let avg = sqg_round(&rho, &cut, &yes, &meas, 2, Coin::Random).unwrap();
        let zero = sqg_round(&rho, &cut, &yes, &meas, 2, Coin::Zero).unwrap().outcome.value();
        let one = sqg_round(&rho, &cut, &yes, &meas, 2, Coin::One).unwrap().outcome.value();
        prop_assert!((avg.outcome.value() - 0.5 * (zero + one)).abs() < 1e-12);

        // the state left after the tests is an exact extension of the kept marginal
        let (_, pi) = copy_symmetric_projector(rho.layout(), &cut, &[0, 1], 2).unwrap();
        let post = &pi * yes.matrix() * &pi;
        let pass = post.trace().re;
        let post = DensityMatrix::new(linalg::hermitize(&post.unscale(pass)), yes.layout().clone()).unwrap();
        let sigma = post.partial_trace(&[0, 1]).unwrap();
        let check = verify_extension(&sigma, &cut, 2, &Extend::AllParties, &post).unwrap();
        prop_assert!(check.marginal_error < 1e-6 && check.symmetry_error < 1e-6);
    }

    #[test]
    fn promise_gaps_never_cross(n in 1usize..=6, delta in 0.0f64..0.3) {
        if let Ok(inst) = reduce_bqp(&toys::always_accept_prep(), n, delta) {
            let best = inst.bounds.iter().map(|b| b.value).fold(inst.beta, f64::max);
            prop_assert!(inst.alpha < best && (0.0..=2.0).contains(&inst.alpha));
        }
    }
}

#[test]
fn qma_sep_probe_tightens_with_k() {
    let mut c = Circuit::new(vec![], vec![Register::new("A", 2), Register::new("B", 2)]).unwrap();
    c.push(Gate::h("A")).unwrap();
    c.push(Gate::cnot("A", "B")).unwrap();
    let cut = Cut::finest(2);
    let beta = nearest_separable(&c.prepare().unwrap(), &cut, &NearestSeparableParams { restarts: 2, iters: 100, ..Default::default() })
        .unwrap()
        .distance;
    let ceiling = qma_sep_soundness(0.0, beta, 0.01).unwrap();
    let mut prev = 1.0;
    for k in 1..=3 {
        let p = adversarial_probe(&ProbeTarget::QmaSep { u: c.clone(), cut: cut.clone(), k }, &[1], 100).unwrap().best;
        // a product witness already reaches |<00|phi+>|^2 = 1/2
        assert!(p >= 0.5 - 1e-9 && p <= prev + 1e-9 && p < 1.0 - 1e-3, "k={k}: {p}");
        assert!(p <= ceiling + 1e-6, "k={k}: {p} > {ceiling}");
        prev = p;
    }
}

#[test]
fn qma_with_empty_witness_is_bqp() {
    for n in [1, 2] {
        let prep = toys::noisy_accept_prep(0.01);
        let a = reduce_bqp(&prep, n, 0.01).unwrap();
        let b = reduce_qma(&prep, n, 0.01).unwrap();
        assert_eq!(a.circuit, b.circuit);
        assert_eq!(a.cut, b.cut);
    }
}

#[test]
fn honest_sqg_play_with_random_guess() {
    let mut r = rng(1);
    let layout = RegisterLayout::qubits(2);
    let cut = Cut::finest(2);
    let ens = ProductEnsemble::random(&[2, 2], 2, &mut r);
    let rho = ens.state(&layout, &cut).unwrap();
    let yes = honest_sqg_state(&ens, &rho, &cut, 3).unwrap();
    let p = sqg_round(&rho, &cut, &yes, &random_guess(4), 3, Coin::Random).unwrap();
    assert!((p.outcome.value() - 0.5).abs() < 1e-12);
    assert!((p.pass_probability - 1.0).abs() < 1e-10);
}

#[test]
fn same_seed_same_report() {
    let strip = |mut r: septest_core::report::ExperimentReport| {
        r.wall_time_s = 0.0;
        serde_json::to_string(&r).unwrap()
    };
    let a = strip(report_suite("product-test", 11).unwrap());
    let b = strip(report_suite("product-test", 11).unwrap());
    assert_eq!(a, b);
}

#[test]
fn decision_circuit_requires_known_register() {
    let c = Circuit::on_qubits(&["x"]);
    assert!(DecisionCircuit::new(c, "missing", 1).is_err());
}
