//! `septest`: command-line front end for the separability testing library.

mod output;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::{json, Value};
use thiserror::Error;

use septest_core::circuit::{parse_circuit, Circuit};
use septest_core::limits;
use septest_core::locc::{
    fvg_sep_bound, locc_sep_bound, printed_corollary_bound, reduction_beta, singlet_test_analytic_for,
    singlet_test_mc,
};
use septest_core::protocols::{
    adversarial_probe, honest_qma_witness, honest_sqg_state, qma2_verifier, qma_sep_verifier, sqg_kept_marginal, sqg_round,
    Coin, ProbeTarget,
};
use septest_core::reductions::{
    reduce_bqp, reduce_qma, reduce_qma2, reduce_qszk, similarity_instance, DecisionCircuit, PromiseInstance, Qma2Verifier,
};
use septest_core::report::{report_suite, SINGLET_SOUNDNESS_ALIAS, SUITES};
use septest_core::separability::{
    bh_bound, choose_k, extended_layout, k_ext_feasible, nearest_pure_product, nearest_separable, ppt_check, Extend, NearestSeparableParams,
    SeesawParams,
};
use septest_core::spectests::{
    permutation_test_circuit_prob, permutation_test_prob, product_test_circuit_prob, product_test_prob, swap_test_circuit_prob,
    swap_test_prob,
};
use septest_core::state::{state_from_json, AnyState, StateJson};
use septest_core::{helstrom, BellKind, Cut, DensityMatrix, PureState, RegisterLayout};

use output::{emit, Format};

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Core(#[from] septest_core::Error),
    #[error("cannot read `{path}`: {message}")]
    Io { path: String, message: String },
    #[error("usage: {0}")]
    Usage(String),
    #[error("output failed: {0}")]
    Output(String),
}

impl CliError {
    fn code(&self) -> &'static str {
        match self {
            CliError::Core(e) => e.code(),
            CliError::Io { .. } => "Io",
            CliError::Usage(_) => "Usage",
            CliError::Output(_) => "Output",
        }
    }

    fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 2,
            _ => 1,
        }
    }
}

type Result<T> = std::result::Result<T, CliError>;

#[derive(Debug, Parser)]
#[command(name = "septest", version, about = "Separability tests, k-extensions, reductions and verifier harnesses")]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct Global {
    /// Seed for every randomised step; drawn from entropy and echoed when omitted.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Write the result here instead of stdout.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true, value_enum, default_value_t = Format::Json)]
    format: Format,
    /// Tolerance override for pass/fail and feasibility verdicts.
    #[arg(long, global = true)]
    tol: Option<f64>,
    /// Override the density-matrix dimension cap.
    #[arg(long = "dim-cap", global = true)]
    dim_cap: Option<usize>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum TestKind {
    Swap,
    Perm,
    Product,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Method {
    Analytic,
    Circuit,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Target {
    Singlet,
    PhiPlus,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum ReduceKind {
    Bqp,
    Qma,
    Qma2,
    Qszk,
    Prod2sim,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Protocol {
    Qma,
    Qma2,
    Sqg,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Prover {
    Honest,
    Probe,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Swap, permutation or product test acceptance.
    Test {
        #[arg(long, value_enum)]
        kind: TestKind,
        #[arg(long)]
        state: PathBuf,
        /// Second state for the swap test.
        #[arg(long)]
        other: Option<PathBuf>,
        /// Registers for the permutation test, e.g. `0,1,2` (default: all).
        #[arg(long, value_delimiter = ',')]
        regs: Option<Vec<usize>>,
        /// Cut for the product test, e.g. `0,1:2` or `A0:B0` (default: one party per register).
        #[arg(long)]
        cut: Option<String>,
        #[arg(long, value_enum, default_value_t = Method::Analytic)]
        method: Method,
    },
    /// Singlet test on n qubit pairs: exact value and a Monte Carlo run.
    SingletTest {
        #[arg(long)]
        n: usize,
        #[arg(long)]
        state: PathBuf,
        #[arg(long, default_value_t = 1000)]
        trials: usize,
        #[arg(long, value_enum, default_value_t = Target::Singlet)]
        target: Target,
    },
    /// Upper bound on the trace distance to the separable set.
    NearestSep {
        #[arg(long)]
        state: PathBuf,
        #[arg(long)]
        cut: Option<String>,
        #[arg(long, default_value_t = 8)]
        restarts: usize,
        #[arg(long, default_value_t = 300)]
        iters: usize,
        #[arg(long)]
        ensemble_size: Option<usize>,
    },
    /// k-extendibility feasibility.
    Kext {
        #[arg(long)]
        state: PathBuf,
        #[arg(long)]
        k: usize,
        #[arg(long)]
        cut: Option<String>,
        /// Party to extend; all parties when omitted.
        #[arg(long)]
        party: Option<usize>,
        #[arg(long, default_value_t = 2000)]
        iters: usize,
    },
    /// Emit a promise instance from a circuit.
    Reduce {
        #[arg(long, value_enum)]
        kind: ReduceKind,
        #[arg(long, default_value_t = 1)]
        n: usize,
        #[arg(long = "in")]
        input: PathBuf,
        /// Second preparation (qszk).
        #[arg(long = "in2")]
        input2: Option<PathBuf>,
        #[arg(long, default_value_t = 0.0)]
        delta: f64,
        /// Decision register label (bqp, qma, qma2).
        #[arg(long, default_value = "D")]
        decision: String,
        /// Accepting value of the decision register.
        #[arg(long, default_value_t = 1)]
        accept: usize,
        /// Witness registers for qma2.
        #[arg(long, value_delimiter = ',')]
        a: Vec<String>,
        #[arg(long, value_delimiter = ',')]
        b: Vec<String>,
        #[arg(long)]
        w: Option<String>,
        /// Cut for prod2sim.
        #[arg(long)]
        cut: Option<String>,
        #[arg(long, default_value_t = 0.0)]
        alpha: f64,
        #[arg(long, default_value_t = 2.0)]
        beta: f64,
    },
    /// Run a verifier against an honest prover or a numerical soundness probe.
    Verify {
        #[arg(long, value_enum)]
        protocol: Protocol,
        /// Promise instance JSON (from `reduce`).
        #[arg(long, conflicts_with = "circuit")]
        instance: Option<PathBuf>,
        /// Bare circuit JSON, used with `--cut`.
        #[arg(long)]
        circuit: Option<PathBuf>,
        #[arg(long)]
        cut: Option<String>,
        #[arg(long, value_enum, default_value_t = Prover::Honest)]
        prover: Prover,
        /// Input state for the honest prover (default `|0...0>`).
        #[arg(long)]
        state: Option<PathBuf>,
        #[arg(long, default_value_t = 2)]
        k: usize,
        #[arg(long, default_value_t = 200)]
        iters: usize,
    },
    /// Closed-form bounds for 1..=n pairs.
    Bounds {
        #[arg(long)]
        n: u32,
        #[arg(long, default_value_t = 2)]
        l: usize,
        #[arg(long, default_value_t = 6)]
        k: usize,
        #[arg(long, default_value_t = 0.5)]
        epsilon: f64,
        #[arg(long, default_value_t = 0.25)]
        delta: f64,
    },
    /// Run a named experiment suite.
    Report {
        #[arg(long)]
        suite: String,
    },
}

fn read(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| CliError::Io { path: path.display().to_string(), message: e.to_string() })
}

fn load_state(path: &Path) -> Result<AnyState> {
    Ok(state_from_json(&read(path)?)?)
}

fn load_density(path: &Path) -> Result<DensityMatrix> {
    Ok(load_state(path)?.to_density()?)
}

fn load_pure(path: &Path) -> Result<PureState> {
    match load_state(path)? {
        AnyState::Pure(p) => Ok(p),
        AnyState::Density(_) => Err(CliError::Usage(format!("`{}` must hold a pure state", path.display()))),
    }
}

fn load_circuit(path: &Path) -> Result<Circuit> {
    Ok(parse_circuit(&read(path)?)?)
}

/// `0,1:2` (register indices) or `A0,A1:B0` (labels); default is one party per register.
fn parse_cut(text: Option<&str>, layout: &RegisterLayout) -> Result<Cut> {
    let Some(text) = text else { return Ok(Cut::finest(layout.len())) };
    let groups: Vec<Vec<&str>> = text.split(':').map(|g| g.split(',').map(str::trim).filter(|s| !s.is_empty()).collect()).collect();
    let numeric = groups.iter().flatten().all(|s| s.parse::<usize>().is_ok());
    let cut = if numeric {
        let idx = groups.iter().map(|g| g.iter().map(|s| s.parse().unwrap()).collect()).collect();
        Cut::new(idx, layout.len())
    } else {
        let labels: Vec<Vec<String>> = groups.iter().map(|g| g.iter().map(|s| s.to_string()).collect()).collect();
        Cut::from_labels(layout, &labels)
    };
    cut.map_err(|e| CliError::Usage(format!("bad --cut `{text}`: {e}")))
}

fn to_value<T: serde::Serialize>(v: &T) -> Value {
    serde_json::to_value(v).expect("serialisable value")
}

fn run_test(kind: TestKind, state: &Path, other: Option<&Path>, regs: Option<Vec<usize>>, cut: Option<&str>, method: Method) -> Result<Value> {
    let circuit = matches!(method, Method::Circuit);
    let p = match kind {
        TestKind::Swap => {
            let other = other.ok_or_else(|| CliError::Usage("the swap test needs --other".into()))?;
            let (a, b) = (load_pure(state)?, load_pure(other)?);
            if circuit { swap_test_circuit_prob(&a, &b)? } else { swap_test_prob(&a, &b)? }
        }
        TestKind::Perm => {
            let rho = load_density(state)?;
            let regs = regs.unwrap_or_else(|| (0..rho.layout().len()).collect());
            if circuit { permutation_test_circuit_prob(&rho, &regs)? } else { permutation_test_prob(&rho, &regs)? }
        }
        TestKind::Product => {
            let psi = load_pure(state)?;
            let cut = parse_cut(cut, psi.layout())?;
            if circuit { product_test_circuit_prob(&psi, &cut)? } else { product_test_prob(&psi, &cut)? }
        }
    };
    Ok(json!({"probability": p, "method": if circuit { "circuit" } else { "analytic" }}))
}

fn bell_target(t: Target) -> BellKind {
    match t {
        Target::Singlet => BellKind::Singlet,
        Target::PhiPlus => BellKind::PhiPlus,
    }
}

fn run_singlet(n: usize, state: &Path, trials: usize, target: Target, seed: u64) -> Result<Value> {
    let rho = load_density(state)?;
    if rho.layout().dims() != vec![2; 2 * n].as_slice() {
        return Err(CliError::Usage(format!("--n {n} needs a state on {} qubits", 2 * n)));
    }
    let kind = bell_target(target);
    let analytic = singlet_test_analytic_for(&rho, kind)?;
    let mc = singlet_test_mc(&rho, kind, trials, seed)?;
    Ok(json!({
        "analytic": analytic,
        "mc_frequency": mc.outcome.value(),
        "mc_std_error": mc.outcome.std_error(),
        "trials": trials,
        "seed": seed,
        "separable_bound": (2.0f64 / 3.0).powi(n as i32),
    }))
}

fn run_nearest(state: &Path, cut: Option<&str>, restarts: usize, iters: usize, ensemble_size: Option<usize>, seed: u64) -> Result<Value> {
    let rho = load_density(state)?;
    let cut = parse_cut(cut, rho.layout())?;
    let r = nearest_separable(&rho, &cut, &NearestSeparableParams { ensemble_size, restarts, iters, seed })?;
    let ppt = if cut.parties() == 2 { Some(to_value(&ppt_check(&rho, &cut)?)) } else { None };
    Ok(json!({
        "distance_upper": r.distance,
        "ensemble": to_value(&r.ensemble),
        "iterations": r.iterations,
        "per_restart": r.per_restart,
        "ppt": ppt,
        "seed": seed,
    }))
}

fn run_kext(state: &Path, k: usize, cut: Option<&str>, party: Option<usize>, iters: usize, tol: Option<f64>) -> Result<Value> {
    let rho = load_density(state)?;
    let cut = parse_cut(cut, rho.layout())?;
    let extend = party.map_or(Extend::AllParties, Extend::Party);
    let r = k_ext_feasible(&rho, &cut, k, &extend, iters, None)?;
    let feasible = tol.map_or(r.feasible, |t| r.residual < t);
    Ok(json!({
        "feasible": feasible,
        "residual": r.residual,
        "iterations": r.iterations,
        "extension": r.extension.as_ref().filter(|_| feasible).map(|e| to_value(&StateJson::from_density(e))),
    }))
}

#[allow(clippy::too_many_arguments)]
fn run_reduce(
    kind: ReduceKind,
    n: usize,
    input: &Path,
    input2: Option<&Path>,
    delta: f64,
    decision: &str,
    accept: usize,
    a: Vec<String>,
    b: Vec<String>,
    w: Option<String>,
    cut: Option<&str>,
    alpha: f64,
    beta: f64,
) -> Result<Value> {
    let c = load_circuit(input)?;
    let inst = match kind {
        ReduceKind::Bqp => reduce_bqp(&DecisionCircuit::new(c, decision, accept)?, n, delta)?,
        ReduceKind::Qma => reduce_qma(&DecisionCircuit::new(c, decision, accept)?, n, delta)?,
        ReduceKind::Qma2 => {
            let w = w.ok_or_else(|| CliError::Usage("qma2 needs --a, --b and --w".into()))?;
            reduce_qma2(&Qma2Verifier::new(c, a, b, w, decision, accept)?, n, delta)?
        }
        ReduceKind::Qszk => {
            let other = input2.ok_or_else(|| CliError::Usage("qszk needs --in2".into()))?;
            reduce_qszk(&c, &load_circuit(other)?, n, delta)?
        }
        ReduceKind::Prod2sim => {
            let cut = parse_cut(cut, &c.output_layout())?;
            similarity_instance(&c, &cut, alpha, beta)?
        }
    };
    Ok(serde_json::from_str(&inst.to_json()).expect("instance json"))
}

/// The honest prover only needs a good witness, not a certified bound, so it uses a
/// smaller ensemble than the `D^2` default.
fn prover_params(dim: usize, seed: u64) -> NearestSeparableParams {
    NearestSeparableParams { ensemble_size: Some(2 * dim), restarts: 4, iters: 300, seed }
}

fn basis_zero(layout: RegisterLayout) -> Result<PureState> {
    Ok(PureState::basis(layout, 0)?)
}

#[allow(clippy::too_many_arguments)]
fn run_verify(
    protocol: Protocol,
    instance: Option<&Path>,
    circuit: Option<&Path>,
    cut: Option<&str>,
    prover: Prover,
    state: Option<&Path>,
    k: usize,
    iters: usize,
    seed: u64,
) -> Result<Value> {
    let (u, cut) = match (instance, circuit) {
        (Some(p), _) => {
            let inst = PromiseInstance::from_json(&read(p)?)?;
            let cut = inst.output_cut()?;
            (inst.circuit, cut)
        }
        (None, Some(p)) => {
            let c = load_circuit(p)?;
            let cut = parse_cut(cut, &c.output_layout())?;
            (c, cut)
        }
        (None, None) => return Err(CliError::Usage("verify needs --instance or --circuit".into())),
    };
    let seeds = [seed, seed.wrapping_add(1), seed.wrapping_add(2)];
    let probe = |target: ProbeTarget| -> Result<Value> {
        let r = adversarial_probe(&target, &seeds, iters)?;
        Ok(json!({"probability": r.best, "summary": "best acceptance found by the probe", "per_seed": r.per_seed, "seed": seed}))
    };
    // fail before any search when the extended witness cannot be represented
    let all: Vec<usize> = (0..cut.parties()).collect();
    match protocol {
        Protocol::Qma => limits::check_density_dim("k-extension", extended_layout(&u.output_layout(), &cut, &all, k + 1)?.0.dim())?,
        Protocol::Sqg => limits::check_density_dim("k-extension", extended_layout(&u.output_layout(), &cut, &all, k)?.0.dim())?,
        Protocol::Qma2 => {}
    }
    match (protocol, prover) {
        (Protocol::Qma, Prover::Probe) => probe(ProbeTarget::QmaSep { u, cut, k }),
        (Protocol::Qma, Prover::Honest) => {
            let rho = match state {
                Some(p) => load_density(p)?,
                None => basis_zero(u.input_layout())?.to_density()?,
            };
            let image = u.run_mixed(&rho)?;
            let near = nearest_separable(&image, &cut, &prover_params(image.dim(), seed))?;
            let w = honest_qma_witness(&u, &cut, &rho, &near.ensemble, k)?;
            let mut out = to_value(&qma_sep_verifier(&u, &cut, &w, k)?);
            out["alpha"] = json!(near.distance);
            out["k"] = json!(k);
            Ok(out)
        }
        (Protocol::Qma2, Prover::Probe) => probe(ProbeTarget::Qma2 { u, cut }),
        (Protocol::Qma2, Prover::Honest) => {
            let psi = match state {
                Some(p) => load_pure(p)?,
                None => basis_zero(u.input_layout())?,
            };
            let out = u.run_pure(&psi)?;
            let near = nearest_pure_product(&out, &cut, &SeesawParams { seed, ..Default::default() })?;
            let claim = near
                .factors
                .iter()
                .map(|f| PureState::new(f.clone(), RegisterLayout::new(vec![f.len()])?))
                .collect::<septest_core::Result<Vec<_>>>()?;
            let mut v = to_value(&qma2_verifier(&u, &cut, &psi, &claim)?);
            v["product_distance"] = json!(near.distance);
            Ok(v)
        }
        (Protocol::Sqg, _) => {
            let rho = u.prepare()?;
            let near = nearest_separable(&rho, &cut, &prover_params(rho.dim(), seed))?;
            let yes = honest_sqg_state(&near.ensemble, &rho, &cut, k)?;
            let sigma = sqg_kept_marginal(&rho, &cut, &yes, k)?.ok_or(septest_core::Error::ZeroProbability)?;
            let (meas, _) = helstrom(&rho, &sigma)?;
            if matches!(prover, Prover::Probe) {
                return probe(ProbeTarget::Sqg { rho, cut, k, no_meas: meas });
            }
            let r = sqg_round(&rho, &cut, &yes, &meas, k, Coin::Random)?;
            let mut v = to_value(&r.outcome);
            v["pass_probability"] = json!(r.pass_probability);
            v["alpha"] = json!(near.distance);
            Ok(v)
        }
    }
}

fn run_bounds(n: u32, l: usize, k: usize, epsilon: f64, delta: f64) -> Result<Value> {
    let mut rows = Vec::new();
    for m in 1..=n {
        let d = 1usize << m;
        rows.push(json!({
            "n": m,
            "local_dim": d,
            "locc_sep_bound": locc_sep_bound(m),
            "fvg_sep_bound": fvg_sep_bound(m),
            "printed_corollary_bound": printed_corollary_bound(m),
            "reduction_beta": reduction_beta(m, delta),
            "bh_bound": bh_bound(l, d, k).ok(),
            "choose_k": choose_k(l, d, epsilon, delta).ok(),
        }));
    }
    Ok(json!({"l": l, "k": k, "epsilon": epsilon, "delta": delta, "rows": rows}))
}

fn run_report(suite: &str, seed: u64, tol: Option<f64>) -> Result<Value> {
    if !SUITES.contains(&suite) && suite != SINGLET_SOUNDNESS_ALIAS {
        return Err(CliError::Usage(format!("unknown suite `{suite}`; expected one of {SUITES:?}")));
    }
    let mut report = report_suite(suite, seed)?;
    if let Some(t) = tol {
        for r in &mut report.rows {
            *r = septest_core::report::ReportRow::new(r.case.clone(), r.inputs.clone(), r.value, r.lower, r.upper, t, r.bound.clone());
        }
    }
    let mut v = to_value(&report);
    v["passed"] = json!(report.passed());
    Ok(v)
}

fn configure_threads() {
    if let Some(n) = std::env::var("SEPTEST_THREADS").ok().and_then(|s| s.parse::<usize>().ok()) {
        // a second initialisation only fails if a pool already exists; keep the existing one
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n.max(1)).build_global();
    }
}

fn run(cli: Cli) -> Result<()> {
    configure_threads();
    let g = &cli.global;
    if let Some(cap) = g.dim_cap {
        limits::set_dim_cap_override(cap);
    }
    let seed = g.seed.unwrap_or_else(rand::random);
    let seeded = matches!(cli.command, Command::SingletTest { .. } | Command::NearestSep { .. } | Command::Verify { .. } | Command::Report { .. });
    let mut doc = match cli.command {
        Command::Test { kind, state, other, regs, cut, method } => run_test(kind, &state, other.as_deref(), regs, cut.as_deref(), method)?,
        Command::SingletTest { n, state, trials, target } => run_singlet(n, &state, trials, target, seed)?,
        Command::NearestSep { state, cut, restarts, iters, ensemble_size } => {
            run_nearest(&state, cut.as_deref(), restarts, iters, ensemble_size, seed)?
        }
        Command::Kext { state, k, cut, party, iters } => run_kext(&state, k, cut.as_deref(), party, iters, g.tol)?,
        Command::Reduce { kind, n, input, input2, delta, decision, accept, a, b, w, cut, alpha, beta } => {
            run_reduce(kind, n, &input, input2.as_deref(), delta, &decision, accept, a, b, w, cut.as_deref(), alpha, beta)?
        }
        Command::Verify { protocol, instance, circuit, cut, prover, state, k, iters } => run_verify(
            protocol,
            instance.as_deref(),
            circuit.as_deref(),
            cut.as_deref(),
            prover,
            state.as_deref(),
            k,
            iters,
            seed,
        )?,
        Command::Bounds { n, l, k, epsilon, delta } => run_bounds(n, l, k, epsilon, delta)?,
        Command::Report { suite } => run_report(&suite, seed, g.tol)?,
    };
    if let (true, Value::Object(m)) = (seeded, &mut doc) {
        m.entry("seed").or_insert(json!(seed));
    }
    emit(&doc, g.format, g.out.as_deref())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            println!("{}", json!({"error": {"code": e.code(), "message": e.to_string()}}));
            ExitCode::from(e.exit_code())
        }
    }
}
