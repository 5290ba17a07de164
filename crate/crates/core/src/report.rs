//! Experiment suites that emit self-describing pass/fail rows.

use std::time::Instant;

use rand::Rng;
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::error::{Error, Result};
use crate::linalg::{self, CVector};
use crate::locc::{singlet_accept_operator, singlet_test_analytic, WernerState};
use crate::reductions::{preparation_for, reduce_qszk};
use crate::rng_for;
use crate::separability::{max_product_expectation, nearest_product, nearest_pure_product, ProductEnsemble, SeesawParams};
use crate::spectests::{product_test_circuit_prob, product_test_prob};
use crate::state::{max_entangled, pairs_cut, BellKind, Cut, DensityMatrix, PureState, RegisterLayout};

/// One checked quantity: `value` must lie in `[lower - tolerance, upper + tolerance]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub case: String,
    pub inputs: serde_json::Value,
    pub value: f64,
    pub lower: Option<f64>,
    pub upper: Option<f64>,
    pub tolerance: f64,
    /// Name of the bound being checked.
    pub bound: String,
    pub pass: bool,
}

impl ReportRow {
    pub fn new(
        case: impl Into<String>,
        inputs: serde_json::Value,
        value: f64,
        lower: Option<f64>,
        upper: Option<f64>,
        tolerance: f64,
        bound: impl Into<String>,
    ) -> Self {
        let pass = value.is_finite()
            && lower.is_none_or(|l| value >= l - tolerance)
            && upper.is_none_or(|u| value <= u + tolerance);
        Self { case: case.into(), inputs, value, lower, upper, tolerance, bound: bound.into(), pass }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub suite: String,
    /// Command line that reproduces the report.
    pub command: String,
    pub seed: u64,
    pub rows: Vec<ReportRow>,
    pub wall_time_s: f64,
}

impl ExperimentReport {
    pub fn passed(&self) -> bool {
        self.rows.iter().all(|r| r.pass)
    }

    pub fn failures(&self) -> impl Iterator<Item = &ReportRow> {
        self.rows.iter().filter(|r| !r.pass)
    }
}

pub const SUITES: [&str; 3] = ["singlet-soundness", "product-test", "qszk-gap"];

/// Accepted in place of `singlet-soundness`.
pub const SINGLET_SOUNDNESS_ALIAS: &str = "theorem3";

/// Runs a named suite.
pub fn report_suite(name: &str, seed: u64) -> Result<ExperimentReport> {
    let start = Instant::now();
    let name = if name == SINGLET_SOUNDNESS_ALIAS { "singlet-soundness" } else { name };
    let rows = match name {
        "singlet-soundness" => singlet_soundness_rows(seed, 1000)?,
        "product-test" => product_test_rows(seed, 200)?,
        "qszk-gap" => qszk_gap_rows(seed)?,
        _ => return Err(Error::InvalidArgument(format!("unknown suite `{name}`; expected one of {SUITES:?}"))),
    };
    Ok(ExperimentReport {
        suite: name.into(),
        command: format!("septest report --suite {name} --seed {seed}"),
        seed,
        rows,
        wall_time_s: start.elapsed().as_secs_f64(),
    })
}

/// Singlet-test soundness and completeness at `n = 1, 2`: product-state seesaw maxima,
/// the Werner boundary state, `samples` random separable ensembles per `n`, and `n` singlets.
pub fn singlet_soundness_rows(seed: u64, samples: usize) -> Result<Vec<ReportRow>> {
    let mut rows = Vec::new();
    for n in [1usize, 2] {
        let bound = (2.0f64 / 3.0).powi(n as i32);
        let layout = RegisterLayout::qubits(2 * n);
        let cut = pairs_cut(n);
        let op = singlet_accept_operator(n, BellKind::Singlet);
        let params = SeesawParams { restarts: 64, iters: 200, seed: seed.wrapping_add(n as u64) };
        let best = max_product_expectation(&op, &layout, &cut, &params)?.value;
        let inputs = json!({"n": n, "restarts": params.restarts, "iters": params.iters});
        rows.push(ReportRow::new("product seesaw max reaches bound", inputs.clone(), best, Some(bound), None, 1e-6, "separable acceptance (2/3)^n"));
        rows.push(ReportRow::new("product seesaw max within bound", inputs, best, None, Some(bound), 1e-9, "separable acceptance (2/3)^n"));

        let mut rng = rng_for(seed, 100 + n as u64);
        let pd = 1usize << n;
        let mut worst = 0.0f64;
        for _ in 0..samples {
            let size = rng.random_range(1..=8);
            let ens = ProductEnsemble::random(&[pd, pd], size, &mut rng);
            let rho = ens.state(&layout, &cut)?;
            worst = worst.max(singlet_test_analytic(&rho)?);
        }
        rows.push(ReportRow::new(
            "random separable ensembles",
            json!({"n": n, "samples": samples, "max_ensemble_size": 8}),
            worst,
            None,
            Some(bound),
            1e-9,
            "separable acceptance (2/3)^n",
        ));

        let singlets = max_entangled(n, BellKind::Singlet)?.to_density()?;
        let p = singlet_test_analytic(&singlets)?;
        rows.push(ReportRow::new("n singlets", json!({"n": n}), p, Some(1.0), Some(1.0), 1e-12, "completeness"));
    }
    let w = singlet_test_analytic(&WernerState::new(0.5)?.density())?;
    rows.push(ReportRow::new("Werner p=1/2", json!({"p": 0.5}), w, Some(2.0 / 3.0), Some(2.0 / 3.0), 1e-12, "separable acceptance (2/3)^n"));
    Ok(rows)
}

/// `sqrt(1-eps)|0...0> + sqrt(eps)|1...1>` under random local unitaries: its largest
/// product overlap is exactly `1 - eps` for `eps <= 1/2`.
pub fn planted_product_distance<R: Rng + ?Sized>(dims: &[usize], eps: f64, rng: &mut R) -> Result<PureState> {
    if !(0.0..=0.5).contains(&eps) || dims.iter().any(|&d| d < 2) {
        return Err(Error::InvalidArgument("need eps in [0, 1/2] and local dimensions >= 2".into()));
    }
    let layout = RegisterLayout::new(dims.to_vec())?;
    let st = linalg::strides(dims);
    let mut v = CVector::zeros(layout.dim());
    v[0] = linalg::c((1.0 - eps).sqrt(), 0.0);
    let ones: usize = st.iter().sum();
    v[ones] += linalg::c(eps.sqrt(), 0.0);
    for (i, &d) in dims.iter().enumerate() {
        let u = linalg::random_unitary(d, rng);
        linalg::apply_local_vec(&mut v, dims, &[i], &u);
    }
    PureState::new(v, layout)
}

/// Product-test band on `count` planted states with `eps` in `[0, 0.3]`.
pub fn product_test_rows(seed: u64, count: usize) -> Result<Vec<ReportRow>> {
    let mut rng = rng_for(seed, 200);
    let mut rows = Vec::new();
    let mut path_gap = 0.0f64;
    let mut seesaw_gap = 0.0f64;
    for i in 0..count {
        let parties = 2 + i % 2;
        // at most one qutrit among three parties keeps the two-copy circuit under the cap
        let mut dims = vec![2; parties];
        let qutrits = if parties == 2 { rng.random_range(0..=2) } else { rng.random_range(0..=1) };
        for d in dims.iter_mut().take(qutrits) {
            *d = 3;
        }
        dims.rotate_right(rng.random_range(0..parties));
        let eps = match i {
            0 => 0.0,
            1 => 0.3,
            _ => rng.random_range(0.0..=0.3),
        };
        let psi = planted_product_distance(&dims, eps, &mut rng)?;
        let cut = Cut::finest(parties);
        let p = product_test_prob(&psi, &cut)?;
        let pc = product_test_circuit_prob(&psi, &cut)?;
        path_gap = path_gap.max((p - pc).abs());
        let nearest = nearest_pure_product(&psi, &cut, &SeesawParams { restarts: 4, iters: 200, seed: seed.wrapping_add(i as u64) })?;
        seesaw_gap = seesaw_gap.max((1.0 - nearest.overlap - eps).abs());
        rows.push(ReportRow::new(
            format!("planted state {i}"),
            json!({"dims": dims, "eps": eps}),
            p,
            Some(1.0 - 2.0 * eps),
            Some(1.0 - 11.0 / 512.0 * eps),
            1e-7,
            "product-test band",
        ));
    }
    rows.push(ReportRow::new("analytic vs circuit", json!({"states": count}), path_gap, None, Some(0.0), 1e-9, "path agreement"));
    rows.push(ReportRow::new("seesaw eps vs planted eps", json!({"states": count}), seesaw_gap, None, Some(0.0), 1e-6, "planted distance"));
    Ok(rows)
}

/// `omega^{(x) n}` for the perfectly correlated pair `rho_0 = |0><0|`, `rho_1 = |1><1|`.
pub fn correlated_qszk_state(n: usize) -> Result<(DensityMatrix, Cut)> {
    let basis = |i: usize| -> Result<DensityMatrix> { PureState::basis(RegisterLayout::qubits(1), i)?.to_density() };
    let p0 = preparation_for(&basis(0)?, "s")?;
    let p1 = preparation_for(&basis(1)?, "s")?;
    let inst = reduce_qszk(&p0, &p1, n, 0.0)?;
    Ok((inst.circuit.prepare()?, inst.output_cut()?))
}

/// Measured nearest-product distance of the correlated QSZK output for `n = 1, 2, 3`.
pub fn qszk_gap_rows(seed: u64) -> Result<Vec<ReportRow>> {
    let mut rows = Vec::new();
    let mut prev: Option<f64> = None;
    for n in 1..=3usize {
        let (omega, cut) = correlated_qszk_state(n)?;
        let d = nearest_product(&omega, &cut, &SeesawParams { restarts: 8, iters: 300, seed: seed.wrapping_add(n as u64) })?.distance;
        let inputs = json!({"n": n, "rho0": "|0><0|", "rho1": "|1><1|", "delta": 0.0});
        if n == 1 {
            rows.push(ReportRow::new("n=1 distance near 1", inputs.clone(), d, Some(1.0), None, 1e-6, "no-instance distance"));
        }
        rows.push(ReportRow::new(format!("n={n} distance"), inputs.clone(), d, Some(0.5), None, 0.0, "(1-delta)/2"));
        if let Some(p) = prev {
            rows.push(ReportRow::new(format!("n={n} increases"), inputs, d - p, Some(0.0), None, 0.0, "monotone growth toward 2"));
        }
        prev = Some(d);
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn row_tolerance() {
        let r = ReportRow::new("x", json!({}), 1.0 + 5e-10, None, Some(1.0), 1e-9, "b");
        assert!(r.pass);
        let r = ReportRow::new("x", json!({}), 0.9, Some(1.0), None, 1e-9, "b");
        assert!(!r.pass);
        let r = ReportRow::new("x", json!({}), f64::NAN, None, None, 1.0, "b");
        assert!(!r.pass);
    }

    #[test]
    fn planted_overlap_is_exact() {
        let mut rng = rng_for(3, 0);
        let psi = planted_product_distance(&[2, 3, 2], 0.2, &mut rng).unwrap();
        let r = nearest_pure_product(&psi, &Cut::finest(3), &SeesawParams::default()).unwrap();
        assert!((r.overlap - 0.8).abs() < 1e-8, "{}", r.overlap);
    }

    #[test]
    fn unknown_suite() {
        assert!(report_suite("nope", 0).is_err());
    }

    #[test]
    fn alias_resolves() {
        let r = report_suite(SINGLET_SOUNDNESS_ALIAS, 1).unwrap();
        assert_eq!(r.suite, "singlet-soundness");
    }

    #[test]
    fn small_product_suite_is_deterministic() {
        let a = product_test_rows(5, 6).unwrap();
        let b = product_test_rows(5, 6).unwrap();
        assert_eq!(a, b);
        assert!(a.iter().all(|r| r.pass));
    }
}
