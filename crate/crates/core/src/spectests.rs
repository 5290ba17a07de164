//! Swap, permutation and product tests, each with an analytic path and a circuit path.

use crate::circuit::{factorial, permutations, Circuit, Control, Gate, Register};
use crate::error::{Error, Result};
use crate::limits;
use crate::linalg::{self, CMatrix, CVector, ONE};
use crate::state::{Cut, DensityMatrix, PureState, RegisterLayout};

/// Basis-index maps of every register permutation `W^pi` over `regs`
/// (`W^pi |i> = |map[i]>`), in lexicographic permutation order.
fn permutation_maps(dims: &[usize], regs: &[usize]) -> Vec<Vec<usize>> {
    let n: usize = dims.iter().product();
    let st = linalg::strides(dims);
    permutations(regs.len())
        .into_iter()
        .map(|pi| {
            (0..n)
                .map(|i| {
                    let dg = linalg::digits(i, dims);
                    let mut out = dg.clone();
                    // content of regs[j] moves to regs[pi[j]]
                    for (j, &r) in regs.iter().enumerate() {
                        out[regs[pi[j]]] = dg[r];
                    }
                    out.iter().zip(&st).map(|(a, b)| a * b).sum()
                })
                .collect()
        })
        .collect()
}

fn check_regs(layout: &RegisterLayout, regs: &[usize]) -> Result<usize> {
    if regs.len() < 2 {
        return Err(Error::InvalidArgument("need at least two registers".into()));
    }
    let mut seen = std::collections::HashSet::new();
    for &r in regs {
        if r >= layout.len() || !seen.insert(r) {
            return Err(Error::InvalidArgument(format!("bad register index {r}")));
        }
    }
    let d = layout.dims()[regs[0]];
    if regs.iter().any(|&r| layout.dims()[r] != d) {
        return Err(Error::LayoutMismatch("permuted registers must share a dimension".into()));
    }
    Ok(d)
}

/// Projector onto the symmetric subspace of `k` registers of dimension `d`,
/// built as the average of the `k!` permutation operators.
#[derive(Debug, Clone)]
pub struct SymmetricProjector {
    pub d: usize,
    pub k: usize,
    pub matrix: CMatrix,
}

impl SymmetricProjector {
    pub fn new(d: usize, k: usize) -> Result<Self> {
        let n = d.checked_pow(k as u32).unwrap_or(usize::MAX);
        limits::check_density_dim("symmetric projector", n)?;
        let dims = vec![d; k];
        let regs: Vec<usize> = (0..k).collect();
        let maps = permutation_maps(&dims, &regs);
        let mut m = CMatrix::zeros(n, n);
        let w = 1.0 / maps.len() as f64;
        for map in &maps {
            for (i, &j) in map.iter().enumerate() {
                m[(j, i)] += linalg::c(w, 0.0);
            }
        }
        Ok(Self { d, k, matrix: m })
    }

    /// `C(d + k - 1, k)`.
    pub fn rank(&self) -> usize {
        let mut r: u128 = 1;
        for i in 0..self.k as u128 {
            r = r * (self.d as u128 + i) / (i + 1);
        }
        r as usize
    }
}

/// `Pi^sym v` on the registers `regs` of a vector with layout dims `dims`.
pub fn symmetrize_vec(v: &CVector, dims: &[usize], regs: &[usize]) -> CVector {
    let maps = permutation_maps(dims, regs);
    let mut out = CVector::zeros(v.len());
    for map in &maps {
        for (i, &j) in map.iter().enumerate() {
            out[j] += v[i];
        }
    }
    out.unscale(maps.len() as f64)
}

/// Swap-test acceptance `1/2 + |<psi|phi>|^2 / 2`.
pub fn swap_test_prob(psi: &PureState, phi: &PureState) -> Result<f64> {
    Ok(0.5 + 0.5 * psi.overlap(phi)?)
}

/// Swap-test acceptance via the two-register permutation-test circuit on `psi (x) phi`.
pub fn swap_test_circuit_prob(psi: &PureState, phi: &PureState) -> Result<f64> {
    if psi.dim() != phi.dim() {
        return Err(Error::LayoutMismatch("swap test needs equal dimensions".into()));
    }
    let d = psi.dim();
    let joint = PureState::from_parts_unchecked(
        linalg::kron_vec(psi.vector(), phi.vector()),
        RegisterLayout::new(vec![d, d])?,
    );
    let c = permutation_test_circuit(2, d)?;
    c.outcome_probability(&joint.to_density()?, &[("W", 0)])
}

/// `Tr(Pi^sym rho)` over `regs`.
pub fn permutation_test_prob(rho: &DensityMatrix, regs: &[usize]) -> Result<f64> {
    check_regs(rho.layout(), regs)?;
    let maps = permutation_maps(rho.layout().dims(), regs);
    let m = rho.matrix();
    let mut s = 0.0;
    for map in &maps {
        // Tr(W rho) = sum_i rho[i, j] over W|j> = |i>
        for (j, &i) in map.iter().enumerate() {
            s += m[(j, i)].re;
        }
    }
    Ok((s / maps.len() as f64).clamp(0.0, 1.0))
}

/// `||Pi^sym psi||^2` over `regs`.
pub fn permutation_test_prob_pure(psi: &PureState, regs: &[usize]) -> Result<f64> {
    check_regs(psi.layout(), regs)?;
    Ok(symmetrize_vec(psi.vector(), psi.layout().dims(), regs).norm_squared().clamp(0.0, 1.0))
}

#[derive(Debug, Clone)]
pub struct PermutationTestOutcome {
    pub probability: f64,
    /// `Pi rho Pi / p`, supported on the symmetric subspace.
    pub post_state: DensityMatrix,
}

/// Acceptance probability together with the post-test state; a zero-probability
/// outcome is reported as [`Error::ZeroProbability`].
pub fn permutation_test(rho: &DensityMatrix, regs: &[usize]) -> Result<PermutationTestOutcome> {
    let p = permutation_test_prob(rho, regs)?;
    if p < 1e-12 {
        return Err(Error::ZeroProbability);
    }
    let dims = rho.layout().dims();
    let n = rho.dim();
    // Pi rho Pi, applying Pi to columns then rows
    let mut a = CMatrix::zeros(n, n);
    for j in 0..n {
        let col = symmetrize_vec(&rho.matrix().column(j).into_owned(), dims, regs);
        a.set_column(j, &col);
    }
    let mut b = CMatrix::zeros(n, n);
    for i in 0..n {
        let row = a.row(i).adjoint();
        let sym = symmetrize_vec(&row, dims, regs);
        b.set_row(i, &sym.adjoint());
    }
    let post = linalg::hermitize(&b.unscale(p));
    Ok(PermutationTestOutcome {
        probability: p,
        post_state: DensityMatrix::from_parts_unchecked(post, rho.layout().clone()),
    })
}

/// Permutation test as a circuit: `qft` on a `k!`-dimensional register `W`,
/// controlled permutation of `R0..R(k-1)`, inverse `qft`; accept on `W = 0`.
pub fn permutation_test_circuit(k: usize, d: usize) -> Result<Circuit> {
    if k < 2 {
        return Err(Error::InvalidArgument("permutation test needs k >= 2".into()));
    }
    let total = d.checked_pow(k as u32).and_then(|x| x.checked_mul(factorial(k)));
    limits::check_pure_dim("permutation test circuit", total.unwrap_or(usize::MAX))?;
    let names: Vec<String> = (0..k).map(|i| format!("R{i}")).collect();
    let mut c = Circuit::new(
        names.iter().map(|n| Register::new(n, d)).collect(),
        vec![Register::new("W", factorial(k))],
    )?;
    let refs: Vec<&str> = names.iter().map(|s| s.as_str()).collect();
    c.push(Gate::qft("W"))?;
    c.push(Gate::controlled_permutation("W", &refs))?;
    c.push(Gate::iqft("W"))?;
    Ok(c)
}

/// Circuit-path permutation test on `regs` of `rho`.
pub fn permutation_test_circuit_prob(rho: &DensityMatrix, regs: &[usize]) -> Result<f64> {
    let d = check_regs(rho.layout(), regs)?;
    let marginal = rho.partial_trace(regs)?;
    let c = permutation_test_circuit(regs.len(), d)?;
    let m = marginal.with_layout(RegisterLayout::new(vec![d; regs.len()])?)?;
    c.outcome_probability(&m, &[("W", 0)])
}

/// Two explicit copies `psi (x) psi` with registers ordered copy 1 then copy 2.
fn two_copies(psi: &PureState) -> Result<PureState> {
    let dims = psi.layout().dims().to_vec();
    let mut all = dims.clone();
    all.extend_from_slice(&dims);
    limits::check_pure_dim("product test", psi.dim() * psi.dim())?;
    Ok(PureState::from_parts_unchecked(
        linalg::kron_vec(psi.vector(), psi.vector()),
        RegisterLayout::new(all)?,
    ))
}

/// Probability that all `l` swap tests between matching parties of two copies pass:
/// `<psi psi| (x)_i Pi^sym_{A_i B_i} |psi psi>`.
pub fn product_test_prob(psi: &PureState, cut: &Cut) -> Result<f64> {
    cut.check_layout(psi.layout())?;
    let n = psi.layout().len();
    let two = two_copies(psi)?;
    let dims = two.layout().dims().to_vec();
    let mut v = two.vector().clone();
    for g in cut.groups() {
        // swapping party i between copies: swap each of its registers with its twin
        let mut swapped = v.clone();
        for &r in g {
            let order: Vec<usize> = (0..2 * n)
                .map(|j| if j == r { r + n } else if j == r + n { r } else { j })
                .collect();
            swapped = linalg::permute_vec(&swapped, &dims, &order);
        }
        v = (v + swapped).scale(0.5);
    }
    Ok(v.norm_squared().clamp(0.0, 1.0))
}

/// Product-test circuit on two copies: one ancilla qubit per party, Hadamards,
/// controlled swaps of every register of that party, Hadamards. Accept when all
/// ancillas read 0. Inputs are `c1.<label>` then `c2.<label>`.
pub fn product_test_circuit(layout: &RegisterLayout, cut: &Cut) -> Result<Circuit> {
    cut.check_layout(layout)?;
    let n = layout.len();
    let label = |copy: usize, i: usize| format!("c{copy}.{}", layout.label(i));
    let mut inputs = Vec::new();
    for copy in 1..=2 {
        for i in 0..n {
            inputs.push(Register::new(&label(copy, i), layout.dims()[i]));
        }
    }
    let anc: Vec<Register> = (0..cut.parties()).map(|p| Register::new(&format!("t{p}"), 2)).collect();
    let mut c = Circuit::new(inputs, anc)?;
    for (p, g) in cut.groups().iter().enumerate() {
        let t = format!("t{p}");
        c.push(Gate::h(&t))?;
        for &r in g {
            c.push(Gate::swap(&label(1, r), &label(2, r)).controlled(Control::nonzero(&t)))?;
        }
        c.push(Gate::h(&t))?;
    }
    Ok(c)
}

pub fn product_test_circuit_prob(psi: &PureState, cut: &Cut) -> Result<f64> {
    let c = product_test_circuit(psi.layout(), cut)?;
    let two = two_copies(psi)?;
    let mut v = c.run_full(two.vector())?;
    let dims: Vec<usize> = c.inputs().iter().chain(c.ancillas()).map(|r| r.dim).collect();
    let st = linalg::strides(&dims);
    let first_anc = c.inputs().len();
    // zero out every amplitude with a nonzero ancilla
    for (i, z) in v.iter_mut().enumerate() {
        if (first_anc..dims.len()).any(|a| (i / st[a]) % 2 != 0) {
            *z = linalg::ZERO;
        }
    }
    Ok(v.norm_squared().clamp(0.0, 1.0))
}

/// `|0...0>` padded product vector helper used by tests and planted families.
pub fn basis_product(layout: &RegisterLayout) -> PureState {
    let mut v = CVector::zeros(layout.dim());
    v[0] = ONE;
    PureState::from_parts_unchecked(v, layout.clone())
}
