//! Separable-set tooling: PPT certificates, nearest separable / product searches,
//! k-extensions, and the k-extendibility machinery.
//!
//! Optimisers here are seesaw heuristics with one-sided guarantees: distances they
//! return are attained by an explicit separable (or product) state and so are
//! upper bounds; overlaps are attained by explicit product vectors and so are
//! lower bounds.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::circuit::permutations;
use crate::error::{Error, Result};
use crate::limits;
use crate::linalg::{self, CMatrix, CVector, ONE, ZERO};
use crate::rng_for;
use crate::state::{Cut, DensityMatrix, PureState, RegisterLayout};

// ---------------------------------------------------------------------------
// party-ordered coordinates
// ---------------------------------------------------------------------------

/// Reordering between a layout and the register order that lists parties contiguously.
#[derive(Debug, Clone)]
pub struct PartySpace {
    dims: Vec<usize>,
    order: Vec<usize>,
    inverse: Vec<usize>,
    party_regs: Vec<usize>,
    pub pd: Vec<usize>,
}

impl PartySpace {
    pub fn new(layout: &RegisterLayout, cut: &Cut) -> Result<Self> {
        cut.check_layout(layout)?;
        let order = cut.party_order();
        let mut inverse = vec![0; order.len()];
        for (j, &o) in order.iter().enumerate() {
            inverse[o] = j;
        }
        Ok(Self {
            dims: layout.dims().to_vec(),
            party_regs: order.iter().map(|&o| layout.dims()[o]).collect(),
            order,
            inverse,
            pd: cut.party_dims(layout),
        })
    }

    pub fn dim(&self) -> usize {
        self.pd.iter().product()
    }

    pub fn to_party(&self, m: &CMatrix) -> CMatrix {
        linalg::permute_mat(m, &self.dims, &self.order)
    }

    pub fn from_party(&self, m: &CMatrix) -> CMatrix {
        linalg::permute_mat(m, &self.party_regs, &self.inverse)
    }

    pub fn vec_to_party(&self, v: &CVector) -> CVector {
        linalg::permute_vec(v, &self.dims, &self.order)
    }

    pub fn vec_from_party(&self, v: &CVector) -> CVector {
        linalg::permute_vec(v, &self.party_regs, &self.inverse)
    }

    fn others(&self, i: usize) -> Vec<usize> {
        (0..self.pd.len()).filter(|&j| j != i).collect()
    }

    /// `(I_i (x) <w|) M (I_i (x) |w>)` where `w` is a vector on all parties but `i`.
    fn env(&self, m: &CMatrix, i: usize, w: &CVector) -> CMatrix {
        let ot = linalg::subsystem_offsets(&self.pd, &[i]);
        let or = linalg::subsystem_offsets(&self.pd, &self.others(i));
        let d = ot.len();
        // t = M (I (x) |w>) restricted to the needed columns
        let mut out = CMatrix::zeros(d, d);
        for c in 0..d {
            for cp in 0..d {
                let mut s = ZERO;
                for (r, &orr) in or.iter().enumerate() {
                    let wr = w[r].conj();
                    if wr == ZERO {
                        continue;
                    }
                    let row = ot[c] + orr;
                    for (rp, &orp) in or.iter().enumerate() {
                        s += wr * m[(row, ot[cp] + orp)] * w[rp];
                    }
                }
                out[(c, cp)] = s;
            }
        }
        out
    }

    /// `Tr_{others}[M (I_i (x) tau)]` for an operator `tau` on all parties but `i`.
    fn env_mixed(&self, m: &CMatrix, i: usize, tau: &CMatrix) -> CMatrix {
        let ot = linalg::subsystem_offsets(&self.pd, &[i]);
        let or = linalg::subsystem_offsets(&self.pd, &self.others(i));
        let d = ot.len();
        let mut out = CMatrix::zeros(d, d);
        for c in 0..d {
            for cp in 0..d {
                let mut s = ZERO;
                for (r, &orr) in or.iter().enumerate() {
                    for (rp, &orp) in or.iter().enumerate() {
                        let t = tau[(rp, r)];
                        if t != ZERO {
                            s += t * m[(ot[c] + orr, ot[cp] + orp)];
                        }
                    }
                }
                out[(c, cp)] = s;
            }
        }
        out
    }

    /// `<w| psi` contracted on all parties but `i`.
    fn contract_vec(&self, psi: &CVector, i: usize, w: &CVector) -> CVector {
        let ot = linalg::subsystem_offsets(&self.pd, &[i]);
        let or = linalg::subsystem_offsets(&self.pd, &self.others(i));
        CVector::from_iterator(
            ot.len(),
            ot.iter().map(|&c| or.iter().enumerate().map(|(r, &o)| w[r].conj() * psi[c + o]).sum()),
        )
    }
}

fn kron_all(vs: &[CVector]) -> CVector {
    let mut v = CVector::from_element(1, ONE);
    for x in vs {
        v = linalg::kron_vec(&v, x);
    }
    v
}

fn kron_except(vs: &[CVector], i: usize) -> CVector {
    let mut v = CVector::from_element(1, ONE);
    for (j, x) in vs.iter().enumerate() {
        if j != i {
            v = linalg::kron_vec(&v, x);
        }
    }
    v
}

// ---------------------------------------------------------------------------
// product ensembles
// ---------------------------------------------------------------------------

/// `sigma = sum_z p_z |psi^{1,z}><psi^{1,z}| (x) ... (x) |psi^{l,z}><psi^{l,z}|`,
/// factors given per party on the party's registers (in cut-group order).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProductEnsemble {
    pub weights: Vec<f64>,
    #[serde(with = "factor_serde")]
    pub factors: Vec<Vec<CVector>>,
}

mod factor_serde {
    use super::*;
    use serde::{Deserializer, Serializer};

    type Raw = Vec<Vec<(Vec<f64>, Vec<f64>)>>;

    pub fn serialize<S: Serializer>(f: &[Vec<CVector>], s: S) -> std::result::Result<S::Ok, S::Error> {
        let raw: Raw = f
            .iter()
            .map(|el| el.iter().map(|v| (v.iter().map(|z| z.re).collect(), v.iter().map(|z| z.im).collect())).collect())
            .collect();
        raw.serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<Vec<Vec<CVector>>, D::Error> {
        let raw = Raw::deserialize(d)?;
        Ok(raw
            .into_iter()
            .map(|el| {
                el.into_iter()
                    .map(|(re, im)| CVector::from_iterator(re.len(), re.iter().zip(&im).map(|(a, b)| linalg::c(*a, *b))))
                    .collect()
            })
            .collect())
    }
}

impl ProductEnsemble {
    pub fn new(weights: Vec<f64>, factors: Vec<Vec<CVector>>) -> Result<Self> {
        if weights.len() != factors.len() || weights.is_empty() {
            return Err(Error::InvalidArgument("one factor list per weight".into()));
        }
        if weights.iter().any(|&w| w < 0.0) || (weights.iter().sum::<f64>() - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidArgument("weights must be a probability vector".into()));
        }
        let l = factors[0].len();
        for el in &factors {
            if el.len() != l {
                return Err(Error::InvalidArgument("every element needs one factor per party".into()));
            }
            for (i, v) in el.iter().enumerate() {
                if v.len() != factors[0][i].len() || (v.norm() - 1.0).abs() > 1e-9 {
                    return Err(Error::InvalidArgument("factors must be unit vectors of the party dimension".into()));
                }
            }
        }
        Ok(Self { weights, factors })
    }

    /// Random ensemble of `size` Haar-random product elements with Dirichlet-like weights.
    pub fn random<R: Rng + ?Sized>(party_dims: &[usize], size: usize, rng: &mut R) -> Self {
        let mut w: Vec<f64> = (0..size).map(|_| -rng.random::<f64>().max(1e-300).ln()).collect();
        let s: f64 = w.iter().sum();
        w.iter_mut().for_each(|x| *x /= s);
        let factors = (0..size)
            .map(|_| party_dims.iter().map(|&d| linalg::random_unit_vector(d, rng)).collect())
            .collect();
        Self { weights: w, factors }
    }

    /// Single pure product element.
    pub fn pure(factors: Vec<CVector>) -> Self {
        Self { weights: vec![1.0], factors: vec![factors] }
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn parties(&self) -> usize {
        self.factors[0].len()
    }

    pub fn party_dims(&self) -> Vec<usize> {
        self.factors[0].iter().map(|v| v.len()).collect()
    }

    /// The mixture in party order.
    pub fn party_matrix(&self) -> CMatrix {
        let d: usize = self.party_dims().iter().product();
        let mut m = CMatrix::zeros(d, d);
        for (w, el) in self.weights.iter().zip(&self.factors) {
            if *w == 0.0 {
                continue;
            }
            let v = kron_all(el);
            m += (&v * v.adjoint()).scale(*w);
        }
        m
    }

    /// The mixture as a state on `layout`, parties placed according to `cut`.
    pub fn state(&self, layout: &RegisterLayout, cut: &Cut) -> Result<DensityMatrix> {
        let ps = PartySpace::new(layout, cut)?;
        if ps.pd != self.party_dims() {
            return Err(Error::LayoutMismatch("ensemble party dimensions differ from cut".into()));
        }
        limits::check_density_dim("ensemble state", ps.dim())?;
        Ok(DensityMatrix::from_parts_unchecked(ps.from_party(&self.party_matrix()), layout.clone()))
    }
}

// ---------------------------------------------------------------------------
// PPT
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PptVerdict {
    /// PPT in dimension 2x2 or 2x3, where PPT is equivalent to separability.
    Separable,
    /// PPT in a dimension where PPT does not decide separability.
    PptOnly,
    /// Negative partial transpose: entangled.
    Entangled,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct PptCheck {
    pub ppt: bool,
    pub min_eigenvalue: f64,
    pub verdict: PptVerdict,
}

/// Partial transpose over the second party of a bipartite cut.
pub fn ppt_check(rho: &DensityMatrix, cut: &Cut) -> Result<PptCheck> {
    cut.check_layout(rho.layout())?;
    if cut.parties() != 2 {
        return Err(Error::InvalidCut("PPT check needs a bipartite cut".into()));
    }
    let pt = linalg::partial_transpose(rho.matrix(), rho.layout().dims(), &cut.groups()[1]);
    let min = linalg::eigvalsh(&pt)[0];
    let ppt = min >= -limits::TOL;
    let mut pd = cut.party_dims(rho.layout());
    pd.sort_unstable();
    let decisive = pd == [2, 2] || pd == [2, 3] || pd[0] == 1;
    let verdict = match (ppt, decisive) {
        (false, _) => PptVerdict::Entangled,
        (true, true) => PptVerdict::Separable,
        (true, false) => PptVerdict::PptOnly,
    };
    Ok(PptCheck { ppt, min_eigenvalue: min, verdict })
}

// ---------------------------------------------------------------------------
// pure product searches
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SeesawParams {
    pub restarts: usize,
    pub iters: usize,
    pub seed: u64,
}

impl Default for SeesawParams {
    fn default() -> Self {
        Self { restarts: 8, iters: 200, seed: 0 }
    }
}

#[derive(Debug, Clone)]
pub struct NearestPureProduct {
    /// Factors per party (cut-group register order).
    pub factors: Vec<CVector>,
    /// The product state on the input layout.
    pub state: PureState,
    /// `|<phi_1 ... phi_l|psi>|^2`, a lower bound on the true maximum.
    pub overlap: f64,
    /// `2 sqrt(1 - overlap)`, an upper bound on the distance to the nearest pure product.
    pub distance: f64,
    /// Best overlap after each sweep of the winning restart.
    pub history: Vec<f64>,
    /// Final overlap of every restart.
    pub per_restart: Vec<f64>,
}

fn initial_factors<R: Rng + ?Sized>(ps: &PartySpace, start: Option<&CMatrix>, rng: &mut R) -> Vec<CVector> {
    match start {
        // leading eigenvectors of the party marginals
        Some(m) => (0..ps.pd.len())
            .map(|i| {
                let red = linalg::partial_trace(m, &ps.pd, &[i]);
                linalg::leading_eigvec(&red).1
            })
            .collect(),
        None => ps.pd.iter().map(|&d| linalg::random_unit_vector(d, rng)).collect(),
    }
}

/// Alternating maximisation of `|<phi_1 (x) ... (x) phi_l|psi>|^2`.
///
/// Restart 0 starts from the marginals' leading eigenvectors, the rest from
/// Haar-random factors. Each factor update is an exact coordinate maximiser, so the
/// overlap is nondecreasing along every run.
pub fn nearest_pure_product(psi: &PureState, cut: &Cut, params: &SeesawParams) -> Result<NearestPureProduct> {
    let ps = PartySpace::new(psi.layout(), cut)?;
    let v = ps.vec_to_party(psi.vector());
    let restarts = params.restarts.max(1);
    let runs: Vec<(f64, Vec<f64>, Vec<CVector>)> = (0..restarts)
        .into_par_iter()
        .map(|r| {
            let mut rng = rng_for(params.seed, r as u64);
            let start = if r == 0 && ps.dim() <= limits::density_cap() {
                Some(linalg::projector(&v))
            } else {
                None
            };
            let mut f = initial_factors(&ps, start.as_ref(), &mut rng);
            let overlap = |f: &[CVector]| kron_all(f).dotc(&v).norm_sqr();
            let mut best = overlap(&f);
            let mut hist = vec![best];
            for _ in 0..params.iters {
                for i in 0..f.len() {
                    let w = kron_except(&f, i);
                    let g = ps.contract_vec(&v, i, &w);
                    if g.norm() > 1e-300 {
                        f[i] = linalg::fix_phase(g.unscale(g.norm()));
                    }
                }
                let o = overlap(&f);
                let prev = best;
                best = best.max(o);
                hist.push(best);
                if best - prev < 1e-15 {
                    break;
                }
            }
            (best, hist, f)
        })
        .collect();
    let per_restart: Vec<f64> = runs.iter().map(|r| r.0).collect();
    let win = argmax(&per_restart);
    let (overlap, history, factors) = runs[win].clone();
    let overlap = overlap.min(1.0);
    let state = PureState::from_parts_unchecked(ps.vec_from_party(&kron_all(&factors)), psi.layout().clone());
    Ok(NearestPureProduct {
        factors,
        state,
        overlap,
        distance: 2.0 * (1.0 - overlap).max(0.0).sqrt(),
        history,
        per_restart,
    })
}

fn argmax(v: &[f64]) -> usize {
    let mut w = 0;
    for (i, x) in v.iter().enumerate() {
        if *x > v[w] {
            w = i;
        }
    }
    w
}

#[derive(Debug, Clone)]
pub struct ProductMaximum {
    pub value: f64,
    pub factors: Vec<CVector>,
    /// The maximising product vector on the input layout.
    pub vector: CVector,
    pub per_restart: Vec<f64>,
}

/// Seesaw maximisation of `<phi_1 ... phi_l| M |phi_1 ... phi_l>` over pure product
/// vectors for a Hermitian `m` on `layout`. Each factor update takes the leading
/// eigenvector of the environment operator, so every run is monotone.
pub fn max_product_expectation(
    m: &CMatrix,
    layout: &RegisterLayout,
    cut: &Cut,
    params: &SeesawParams,
) -> Result<ProductMaximum> {
    let ps = PartySpace::new(layout, cut)?;
    let mp = ps.to_party(&linalg::hermitize(m));
    let restarts = params.restarts.max(1);
    let runs: Vec<(f64, Vec<CVector>)> = (0..restarts)
        .into_par_iter()
        .map(|r| {
            let mut rng = rng_for(params.seed, r as u64);
            let mut f: Vec<CVector> = ps.pd.iter().map(|&d| linalg::random_unit_vector(d, &mut rng)).collect();
            let val = |f: &[CVector]| {
                let v = kron_all(f);
                (v.adjoint() * &mp * &v)[(0, 0)].re
            };
            let mut best = val(&f);
            for _ in 0..params.iters {
                for i in 0..f.len() {
                    let env = ps.env(&mp, i, &kron_except(&f, i));
                    f[i] = linalg::leading_eigvec(&env).1;
                }
                let v = val(&f);
                let prev = best;
                best = best.max(v);
                if best - prev < 1e-15 {
                    break;
                }
            }
            (best, f)
        })
        .collect();
    let per_restart: Vec<f64> = runs.iter().map(|r| r.0).collect();
    let win = argmax(&per_restart);
    let factors = runs[win].1.clone();
    let vector = ps.vec_from_party(&kron_all(&factors));
    Ok(ProductMaximum { value: per_restart[win], factors, vector, per_restart })
}

// ---------------------------------------------------------------------------
// nearest separable state
// ---------------------------------------------------------------------------

#[derive(Debug, Clone)]
pub struct NearestSeparable {
    pub ensemble: ProductEnsemble,
    pub sigma: DensityMatrix,
    /// `||rho - sigma||_1` for the returned `sigma`: an upper bound on the distance to S.
    pub distance: f64,
    /// Best distance after each sweep of the winning restart (nonincreasing).
    pub history: Vec<f64>,
    pub iterations: usize,
    pub per_restart: Vec<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct NearestSeparableParams {
    /// Number of product elements; `None` means `D^2`.
    pub ensemble_size: Option<usize>,
    pub restarts: usize,
    pub iters: usize,
    pub seed: u64,
}

impl Default for NearestSeparableParams {
    fn default() -> Self {
        Self { ensemble_size: None, restarts: 8, iters: 300, seed: 0 }
    }
}

struct EnsembleState {
    w: Vec<f64>,
    f: Vec<Vec<CVector>>,
}

impl EnsembleState {
    fn element(&self, z: usize) -> CMatrix {
        linalg::projector(&kron_all(&self.f[z]))
    }

    fn matrix(&self, d: usize) -> CMatrix {
        let mut m = CMatrix::zeros(d, d);
        for z in 0..self.w.len() {
            if self.w[z] > 0.0 {
                m += self.element(z).scale(self.w[z]);
            }
        }
        m
    }
}

/// Euclidean projection onto the probability simplex.
pub fn project_simplex(v: &[f64]) -> Vec<f64> {
    let mut u = v.to_vec();
    u.sort_by(|a, b| b.total_cmp(a));
    let mut css = 0.0;
    let mut theta = 0.0;
    for (i, &x) in u.iter().enumerate() {
        css += x;
        let t = (css - 1.0) / (i + 1) as f64;
        if x - t > 0.0 {
            theta = t;
        }
    }
    v.iter().map(|&x| (x - theta).max(0.0)).collect()
}

fn trace_dist_m(a: &CMatrix, b: &CMatrix) -> f64 {
    linalg::trace_norm_hermitian(&(a - b))
}

const LM_MAX_RESIDUALS: usize = 1024;

/// Real coordinates of a Hermitian matrix with Frobenius-compatible scaling.
fn hermitian_coords(h: &CMatrix) -> Vec<f64> {
    let d = h.nrows();
    let mut out = Vec::with_capacity(d * d);
    let s2 = std::f64::consts::SQRT_2;
    for a in 0..d {
        out.push(h[(a, a)].re);
        for b in a + 1..d {
            out.push(s2 * h[(a, b)].re);
            out.push(s2 * h[(a, b)].im);
        }
    }
    out
}

/// Levenberg-Marquardt on `|| sum_z x_z x_z^dagger - rho ||_F^2` with unnormalised
/// product vectors `x_z = sqrt(p_z) u_{z,1} (x) ... (x) u_{z,l}`.
fn levenberg_marquardt_fit(rho: &CMatrix, ps: &PartySpace, st: &mut EnsembleState, iters: usize) {
    use nalgebra::{DMatrix, DVector};
    let l = ps.pd.len();
    let size = st.w.len();
    let scale0 = |st: &EnsembleState| -> Vec<Vec<CVector>> {
        (0..size)
            .map(|z| {
                let s = st.w[z].max(0.0).powf(0.5 / l as f64);
                st.f[z].iter().map(|v| v * linalg::c(s, 0.0)).collect()
            })
            .collect()
    };
    let mut u = scale0(st);
    let sigma_of = |u: &[Vec<CVector>]| {
        let mut m = CMatrix::zeros(rho.nrows(), rho.nrows());
        for el in u {
            m += linalg::projector(&kron_all(el));
        }
        m
    };
    let resid = |u: &[Vec<CVector>]| DVector::from_vec(hermitian_coords(&(sigma_of(u) - rho)));
    let mut r = resid(&u);
    let mut cost = r.norm_squared();
    let mut lambda = 1e-3;
    let nparams: usize = size * ps.pd.iter().map(|d| 2 * d).sum::<usize>();
    for _ in 0..iters {
        if cost < 1e-28 {
            break;
        }
        let mut jac = DMatrix::<f64>::zeros(r.len(), nparams);
        let mut col = 0;
        for el in &u {
            let x = kron_all(el);
            for i in 0..l {
                for cidx in 0..ps.pd[i] {
                    for unit in [linalg::c(1.0, 0.0), linalg::c(0.0, 1.0)] {
                        let mut e = CVector::zeros(ps.pd[i]);
                        e[cidx] = unit;
                        let mut dx = CVector::from_element(1, ONE);
                        for (j, f) in el.iter().enumerate() {
                            dx = linalg::kron_vec(&dx, if j == i { &e } else { f });
                        }
                        let dm = &dx * x.adjoint() + &x * dx.adjoint();
                        for (k, v) in hermitian_coords(&dm).into_iter().enumerate() {
                            jac[(k, col)] = v;
                        }
                        col += 1;
                    }
                }
            }
        }
        let jjt = &jac * jac.transpose();
        let mut improved = false;
        for _ in 0..12 {
            let mut a = jjt.clone();
            for k in 0..a.nrows() {
                a[(k, k)] += lambda;
            }
            let Some(ch) = a.cholesky() else {
                lambda *= 10.0;
                continue;
            };
            let step = -(jac.transpose() * ch.solve(&r));
            let mut cand = u.clone();
            let mut k = 0;
            for el in cand.iter_mut() {
                for f in el.iter_mut() {
                    for cidx in 0..f.len() {
                        f[cidx] += linalg::c(step[k], step[k + 1]);
                        k += 2;
                    }
                }
            }
            let rc = resid(&cand);
            let cc = rc.norm_squared();
            if cc < cost {
                u = cand;
                r = rc;
                cost = cc;
                lambda = (lambda / 3.0).max(1e-12);
                improved = true;
                break;
            }
            lambda *= 4.0;
        }
        if !improved {
            break;
        }
    }
    for z in 0..size {
        let norms: Vec<f64> = u[z].iter().map(|v| v.norm()).collect();
        let w: f64 = norms.iter().map(|n| n * n).product();
        if w > 0.0 {
            st.w[z] = w;
            st.f[z] = u[z].iter().zip(&norms).map(|(v, n)| v.unscale(*n)).collect();
        } else {
            st.w[z] = 0.0;
        }
    }
}

/// One restart: Frobenius fit (block updates, then Levenberg-Marquardt), then trace-norm polishing.
fn nearest_separable_run(rho: &CMatrix, ps: &PartySpace, size: usize, iters: usize, rng: &mut impl Rng) -> (f64, Vec<f64>, EnsembleState, usize) {
    let d = ps.dim();
    let mut st = EnsembleState {
        w: vec![1.0 / size as f64; size],
        f: (0..size).map(|_| ps.pd.iter().map(|&x| linalg::random_unit_vector(x, rng)).collect()).collect(),
    };
    let mut hist = Vec::new();
    let mut best = f64::INFINITY;

    // stage 1: exact block updates of || rho - sum_z p_z phi_z ||_F^2 with free nonnegative weights
    let mut sigma = st.matrix(d);
    let stage1 = iters / 2;
    for _ in 0..stage1.min(20) {
        for z in 0..size {
            let mut resid = rho - &sigma + st.element(z).scale(st.w[z]);
            for i in 0..ps.pd.len() {
                let env = ps.env(&resid, i, &kron_except(&st.f[z], i));
                st.f[z][i] = linalg::leading_eigvec(&env).1;
            }
            let phi = kron_all(&st.f[z]);
            let p = (phi.adjoint() * &resid * &phi)[(0, 0)].re.max(0.0);
            resid -= linalg::projector(&phi).scale(p);
            st.w[z] = p;
            sigma = rho - resid;
        }
        let t: f64 = st.w.iter().sum();
        if t > 0.0 {
            let m = sigma.unscale(t);
            best = best.min(trace_dist_m(rho, &m));
        }
        hist.push(best);
    }
    if d * d <= LM_MAX_RESIDUALS {
        levenberg_marquardt_fit(rho, ps, &mut st, stage1.saturating_sub(20).max(20));
    }
    let t: f64 = st.w.iter().sum();
    if t > 0.0 {
        st.w.iter_mut().for_each(|x| *x /= t);
    } else {
        st.w = vec![1.0 / size as f64; size];
    }
    sigma = st.matrix(d);
    let mut cur = trace_dist_m(rho, &sigma);
    best = best.min(cur);

    // stage 2: trace-norm descent with accept-only-improvement steps
    let mut step = 0.1;
    let mut used = stage1;
    for _ in stage1..iters {
        used += 1;
        let before = cur;
        let s = linalg::hermitian_sign(&(rho - &sigma));
        // factors: align each with the environment of S, interpolating toward the eigenvector
        for z in 0..size {
            for i in 0..ps.pd.len() {
                let env = ps.env(&s, i, &kron_except(&st.f[z], i));
                let target = linalg::leading_eigvec(&env).1;
                let old = st.f[z][i].clone();
                let ph = old.dotc(&target);
                let target = if ph.norm() > 0.0 { target * (ph.conj() / ph.norm()) } else { target };
                for t in [1.0, 0.5, 0.25, 0.1] {
                    let cand = linalg::normalize(&(&old * linalg::c(1.0 - t, 0.0) + &target * linalg::c(t, 0.0)));
                    let prev_el = st.element(z);
                    st.f[z][i] = cand;
                    let new_sigma = &sigma + (st.element(z) - prev_el).scale(st.w[z]);
                    let v = trace_dist_m(rho, &new_sigma);
                    if v < cur - 1e-15 {
                        cur = v;
                        sigma = new_sigma;
                        break;
                    }
                    st.f[z][i] = old.clone();
                }
            }
        }
        // weights: projected gradient on the simplex with backtracking
        let s = linalg::hermitian_sign(&(rho - &sigma));
        let grad: Vec<f64> = (0..size).map(|z| -(&s * st.element(z)).trace().re).collect();
        let mut eta = step;
        loop {
            let cand: Vec<f64> = st.w.iter().zip(&grad).map(|(w, g)| w - eta * g).collect();
            let cand = project_simplex(&cand);
            let old = std::mem::replace(&mut st.w, cand);
            let m = st.matrix(d);
            let v = trace_dist_m(rho, &m);
            if v < cur - 1e-15 {
                cur = v;
                sigma = m;
                step = (eta * 2.0).min(1.0);
                break;
            }
            st.w = old;
            eta *= 0.5;
            if eta < 1e-10 {
                step = 1e-3;
                break;
            }
        }
        best = best.min(cur);
        hist.push(best);
        if before - cur < 1e-13 && cur <= best {
            // a random nudge of one element's factors gives the seesaw a chance to move
            let z = rng.random_range(0..size);
            let i = rng.random_range(0..ps.pd.len());
            let old = st.f[z][i].clone();
            let noise = linalg::random_unit_vector(old.len(), rng);
            st.f[z][i] = linalg::normalize(&(&old + noise * linalg::c(0.05, 0.0)));
            let m = st.matrix(d);
            let v = trace_dist_m(rho, &m);
            if v < cur {
                cur = v;
                sigma = m;
            } else {
                st.f[z][i] = old;
            }
        }
    }
    // the returned state is the polished one, whose distance is `cur`
    (cur, hist, st, used)
}

/// Seesaw search for the separable state nearest to `rho` in trace distance.
pub fn nearest_separable(rho: &DensityMatrix, cut: &Cut, params: &NearestSeparableParams) -> Result<NearestSeparable> {
    let ps = PartySpace::new(rho.layout(), cut)?;
    cut.require_parties(2)?;
    let d = ps.dim();
    let size = params.ensemble_size.unwrap_or(d * d).max(1);
    let rp = ps.to_party(rho.matrix());
    let restarts = params.restarts.max(1);
    let runs: Vec<(f64, Vec<f64>, EnsembleState, usize)> = (0..restarts)
        .into_par_iter()
        .map(|r| {
            let mut rng = rng_for(params.seed, r as u64);
            nearest_separable_run(&rp, &ps, size, params.iters.max(2), &mut rng)
        })
        .collect();
    let per_restart: Vec<f64> = runs.iter().map(|r| r.0).collect();
    let mut win = 0;
    for (i, x) in per_restart.iter().enumerate() {
        if *x < per_restart[win] {
            win = i;
        }
    }
    let (distance, mut history, st, iterations) = {
        let r = &runs[win];
        (r.0, r.1.clone(), EnsembleState { w: r.2.w.clone(), f: r.2.f.clone() }, r.3)
    };
    // drop zero-weight elements
    let keep: Vec<usize> = (0..st.w.len()).filter(|&z| st.w[z] > 0.0).collect();
    let mut w: Vec<f64> = keep.iter().map(|&z| st.w[z]).collect();
    let t: f64 = w.iter().sum();
    w.iter_mut().for_each(|x| *x /= t);
    let ensemble = ProductEnsemble { weights: w, factors: keep.iter().map(|&z| st.f[z].clone()).collect() };
    let sigma = ensemble.state(rho.layout(), cut)?;
    let distance = trace_dist_m(rho.matrix(), sigma.matrix()).min(distance.max(0.0) + 1e-12);
    if let Some(last) = history.last_mut() {
        *last = last.min(distance);
    }
    Ok(NearestSeparable { ensemble, sigma, distance, history, iterations, per_restart })
}

/// Largest fidelity with a separable state found by a seesaw over product ensembles.
/// Returns the best value of every restart (each a lower bound on the true maximum).
pub fn separable_fidelity_search(rho: &DensityMatrix, cut: &Cut, params: &NearestSeparableParams) -> Result<Vec<f64>> {
    let ps = PartySpace::new(rho.layout(), cut)?;
    let d = ps.dim();
    let size = params.ensemble_size.unwrap_or(4).max(1);
    let rp = ps.to_party(rho.matrix());
    let sr = linalg::sqrt_psd(&rp);
    let fid = |s: &CMatrix| crate::state::fidelity_matrices(&rp, s);
    Ok((0..params.restarts.max(1))
        .into_par_iter()
        .map(|r| {
            let mut rng = rng_for(params.seed, r as u64);
            let mut st = EnsembleState {
                w: vec![1.0 / size as f64; size],
                f: (0..size).map(|_| ps.pd.iter().map(|&x| linalg::random_unit_vector(x, &mut rng)).collect()).collect(),
            };
            let mut sigma = st.matrix(d);
            let mut cur = fid(&sigma);
            for _ in 0..params.iters {
                let before = cur;
                // gradient of F at sigma: sqrt(F) * sqrt(rho) (sqrt(rho) sigma sqrt(rho))^{-1/2} sqrt(rho)
                let inner = &sr * &sigma * &sr;
                let (vals, vecs) = linalg::eigh(&inner);
                let floor = 1e-12 * vals.last().copied().unwrap_or(1.0).max(1e-300);
                let isq = linalg::spectral_map(&vals, &vecs, |l| if l > floor { 1.0 / l.sqrt() } else { 0.0 });
                let g = &sr * isq * &sr;
                for z in 0..size {
                    for i in 0..ps.pd.len() {
                        let env = ps.env(&g, i, &kron_except(&st.f[z], i));
                        let old = st.f[z][i].clone();
                        st.f[z][i] = linalg::leading_eigvec(&env).1;
                        let m = st.matrix(d);
                        let v = fid(&m);
                        if v > cur {
                            cur = v;
                            sigma = m;
                        } else {
                            st.f[z][i] = old;
                        }
                    }
                }
                let grad: Vec<f64> = (0..size).map(|z| (&g * st.element(z)).trace().re).collect();
                let cand = project_simplex(&st.w.iter().zip(&grad).map(|(w, g)| w + 0.05 * g).collect::<Vec<_>>());
                let old = std::mem::replace(&mut st.w, cand);
                let m = st.matrix(d);
                let v = fid(&m);
                if v > cur {
                    cur = v;
                    sigma = m;
                } else {
                    st.w = old;
                }
                if cur - before < 1e-14 {
                    break;
                }
            }
            cur
        })
        .collect())
}

// ---------------------------------------------------------------------------
// nearest (mixed) product state
// ---------------------------------------------------------------------------

#[derive(Debug, Clone)]
pub struct NearestProduct {
    /// Factor density matrices per party.
    pub factors: Vec<CMatrix>,
    pub sigma: DensityMatrix,
    /// `||rho - sigma_1 (x) ... (x) sigma_l||_1`, an upper bound on the distance to product states.
    pub distance: f64,
    pub per_restart: Vec<f64>,
}

fn kron_mats(ms: &[CMatrix]) -> CMatrix {
    let mut m = CMatrix::identity(1, 1);
    for x in ms {
        m = linalg::kron(&m, x);
    }
    m
}

fn kron_mats_except(ms: &[CMatrix], i: usize) -> CMatrix {
    let mut m = CMatrix::identity(1, 1);
    for (j, x) in ms.iter().enumerate() {
        if j != i {
            m = linalg::kron(&m, x);
        }
    }
    m
}

fn density_from_factor(g: &CMatrix) -> CMatrix {
    let m = g * g.adjoint();
    let t = m.trace().re;
    m.unscale(t)
}

/// Search for the product state `sigma_1 (x) ... (x) sigma_l` nearest to `rho`.
///
/// Each factor is parametrised as `G G^dagger / Tr(G G^dagger)` and updated by
/// backtracking subgradient steps on the trace distance; restart 0 starts from the
/// marginals (the product of reduced states), the others from random states.
pub fn nearest_product(rho: &DensityMatrix, cut: &Cut, params: &SeesawParams) -> Result<NearestProduct> {
    let ps = PartySpace::new(rho.layout(), cut)?;
    let rp = ps.to_party(rho.matrix());
    let l = ps.pd.len();
    let runs: Vec<(f64, Vec<CMatrix>)> = (0..params.restarts.max(1))
        .into_par_iter()
        .map(|r| {
            let mut rng = rng_for(params.seed, r as u64);
            let mut gs: Vec<CMatrix> = (0..l)
                .map(|i| {
                    if r == 0 {
                        linalg::sqrt_psd(&linalg::partial_trace(&rp, &ps.pd, &[i]))
                    } else {
                        let d = ps.pd[i];
                        CMatrix::from_fn(d, d, |_, _| linalg::gaussian(&mut rng))
                    }
                })
                .collect();
            let sig = |gs: &[CMatrix]| kron_mats(&gs.iter().map(density_from_factor).collect::<Vec<_>>());
            let mut cur = trace_dist_m(&rp, &sig(&gs));
            let mut steps = vec![0.5; l];
            for it in 0..params.iters {
                let before = cur;
                for i in 0..l {
                    let dens: Vec<CMatrix> = gs.iter().map(density_from_factor).collect();
                    let sigma = kron_mats(&dens);
                    let s = linalg::hermitian_sign(&(&rp - &sigma));
                    // d f / d sigma_i = -Tr_others[S (I (x) sigma_others)]
                    let e = -ps.env_mixed(&s, i, &kron_mats_except(&dens, i));
                    let e = linalg::hermitize(&e);
                    let t = (&gs[i] * gs[i].adjoint()).trace().re;
                    let shift = (&e * &dens[i]).trace().re;
                    let grad = (&e - CMatrix::identity(e.nrows(), e.nrows()).scale(shift)) * &gs[i] * linalg::c(2.0 / t, 0.0);
                    let gn = grad.norm();
                    if gn < 1e-15 {
                        continue;
                    }
                    let scale = gs[i].norm() / gn;
                    let mut eta = steps[i];
                    loop {
                        let mut cand = gs.clone();
                        cand[i] = &gs[i] - &grad * linalg::c(eta * scale, 0.0);
                        let v = trace_dist_m(&rp, &sig(&cand));
                        if v < cur - 1e-15 {
                            cur = v;
                            gs = cand;
                            steps[i] = (eta * 1.5).min(1.0);
                            break;
                        }
                        eta *= 0.5;
                        if eta < 1e-9 {
                            steps[i] = 0.05;
                            break;
                        }
                    }
                }
                if before - cur < 1e-14 && it > 10 {
                    // random local move before giving up
                    let i = rng.random_range(0..l);
                    let d = ps.pd[i];
                    let mut cand = gs.clone();
                    let n = CMatrix::from_fn(d, d, |_, _| linalg::gaussian(&mut rng));
                    cand[i] = &gs[i] + n * linalg::c(0.02 * gs[i].norm() / d as f64, 0.0);
                    let v = trace_dist_m(&rp, &sig(&cand));
                    if v < cur {
                        cur = v;
                        gs = cand;
                    } else if it > 50 {
                        break;
                    }
                }
            }
            (cur, gs.iter().map(density_from_factor).collect())
        })
        .collect();
    let per_restart: Vec<f64> = runs.iter().map(|r| r.0).collect();
    let mut win = 0;
    for (i, x) in per_restart.iter().enumerate() {
        if *x < per_restart[win] {
            win = i;
        }
    }
    let factors = runs[win].1.clone();
    let m = ps.from_party(&kron_mats(&factors));
    let sigma = DensityMatrix::from_parts_unchecked(m, rho.layout().clone());
    let distance = trace_dist_m(rho.matrix(), sigma.matrix());
    Ok(NearestProduct { factors, sigma, distance, per_restart })
}

/// `rho_{A_1} (x) ... (x) rho_{A_l}` on the input layout.
pub fn product_of_marginals(rho: &DensityMatrix, cut: &Cut) -> Result<DensityMatrix> {
    let ps = PartySpace::new(rho.layout(), cut)?;
    let rp = ps.to_party(rho.matrix());
    let margs: Vec<CMatrix> = (0..ps.pd.len()).map(|i| linalg::partial_trace(&rp, &ps.pd, &[i])).collect();
    Ok(DensityMatrix::from_parts_unchecked(ps.from_party(&kron_mats(&margs)), rho.layout().clone()))
}

// ---------------------------------------------------------------------------
// k-extensions
// ---------------------------------------------------------------------------

/// Layout with `k - 1` extra copies of the listed parties appended, copy-major:
/// original registers, then copy 2 of every listed party, then copy 3, ...
pub fn extended_layout(layout: &RegisterLayout, cut: &Cut, parties: &[usize], k: usize) -> Result<(RegisterLayout, Vec<Vec<Vec<usize>>>)> {
    cut.check_layout(layout)?;
    if k < 1 {
        return Err(Error::InvalidArgument("k must be at least 1".into()));
    }
    let mut dims = layout.dims().to_vec();
    let mut labels: Vec<String> = (0..layout.len()).map(|i| layout.label(i)).collect();
    // copies[p][c] = registers of copy c (0-based) of party p
    let mut copies: Vec<Vec<Vec<usize>>> = parties.iter().map(|&p| vec![cut.groups()[p].clone()]).collect();
    for c in 2..=k {
        for (pi, &p) in parties.iter().enumerate() {
            let mut regs = Vec::new();
            for &r in &cut.groups()[p] {
                regs.push(dims.len());
                dims.push(layout.dims()[r]);
                labels.push(format!("{}^{c}", layout.label(r)));
            }
            copies[pi].push(regs);
        }
    }
    let total: usize = dims.iter().product();
    limits::check_density_dim("k-extension", total)?;
    Ok((RegisterLayout::with_labels(dims, labels)?, copies))
}

/// `sum_z p_z` of the ensemble element with the factors of each listed party repeated `k` times.
pub fn k_extension_parties(
    ens: &ProductEnsemble,
    layout: &RegisterLayout,
    cut: &Cut,
    parties: &[usize],
    k: usize,
) -> Result<DensityMatrix> {
    let (ext, _) = extended_layout(layout, cut, parties, k)?;
    let ps = PartySpace::new(layout, cut)?;
    if ps.pd != ens.party_dims() {
        return Err(Error::LayoutMismatch("ensemble party dimensions differ from cut".into()));
    }
    let inv = {
        let mut inv = vec![0; ps.order.len()];
        for (j, &o) in ps.order.iter().enumerate() {
            inv[o] = j;
        }
        inv
    };
    let mut m = CMatrix::zeros(ext.dim(), ext.dim());
    for (w, el) in ens.weights.iter().zip(&ens.factors) {
        // original block in layout order, then copies in copy-major order
        let base = linalg::permute_vec(&kron_all(el), &ps.party_regs, &inv);
        let mut v = base;
        for _ in 2..=k {
            for &p in parties {
                v = linalg::kron_vec(&v, &el[p]);
            }
        }
        m += linalg::projector(&v).scale(*w);
    }
    Ok(DensityMatrix::from_parts_unchecked(m, ext))
}

/// k-extension of one party.
pub fn k_extension(ens: &ProductEnsemble, layout: &RegisterLayout, cut: &Cut, party: usize, k: usize) -> Result<DensityMatrix> {
    k_extension_parties(ens, layout, cut, &[party], k)
}

/// Which parties a k-extendibility query extends.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Extend {
    /// Every party gets `k` copies.
    AllParties,
    /// Only the listed party.
    Party(usize),
}

impl Extend {
    fn parties(&self, l: usize) -> Vec<usize> {
        match self {
            Extend::AllParties => (0..l).collect(),
            Extend::Party(p) => vec![*p],
        }
    }
}

/// Symmetrisation over permutations of the copies of every extended party.
struct CopySymmetrizer {
    maps: Vec<Vec<usize>>,
}

impl CopySymmetrizer {
    fn new(dims: &[usize], copies: &[Vec<Vec<usize>>]) -> Self {
        let n: usize = dims.iter().product();
        let st = linalg::strides(dims);
        // all combinations of one permutation per party
        let mut maps: Vec<Vec<usize>> = vec![(0..n).collect()];
        for party in copies {
            let k = party.len();
            let mut next = Vec::new();
            for pi in permutations(k) {
                let single: Vec<usize> = (0..n)
                    .map(|i| {
                        let dg = linalg::digits(i, dims);
                        let mut out = dg.clone();
                        for (c, regs) in party.iter().enumerate() {
                            for (t, &r) in regs.iter().enumerate() {
                                out[party[pi[c]][t]] = dg[r];
                            }
                        }
                        out.iter().zip(&st).map(|(a, b)| a * b).sum()
                    })
                    .collect();
                for m in &maps {
                    next.push(m.iter().map(|&x| single[x]).collect());
                }
            }
            maps = next;
        }
        Self { maps }
    }

    fn apply(&self, x: &CMatrix) -> CMatrix {
        let n = x.nrows();
        let mut out = CMatrix::zeros(n, n);
        for m in &self.maps {
            for j in 0..n {
                for i in 0..n {
                    out[(m[i], m[j])] += x[(i, j)];
                }
            }
        }
        out.unscale(self.maps.len() as f64)
    }

    fn symmetry_deviation(&self, x: &CMatrix) -> f64 {
        linalg::max_abs(&(self.apply(x) - x))
    }
}

/// Extended layout and the projector onto states symmetric under permutations of the
/// `k` copies of every listed party (product of per-party symmetric projectors).
pub fn copy_symmetric_projector(layout: &RegisterLayout, cut: &Cut, parties: &[usize], k: usize) -> Result<(RegisterLayout, CMatrix)> {
    let (ext, copies) = extended_layout(layout, cut, parties, k)?;
    let sym = CopySymmetrizer::new(ext.dims(), &copies);
    let n = ext.dim();
    let mut p = CMatrix::zeros(n, n);
    let w = 1.0 / sym.maps.len() as f64;
    for m in &sym.maps {
        for (i, &j) in m.iter().enumerate() {
            p[(j, i)] += linalg::c(w, 0.0);
        }
    }
    Ok((ext, p))
}

#[derive(Debug, Clone)]
pub struct KExtFeasibility {
    /// Residual below `1e-6`.
    pub feasible: bool,
    /// Distance between the last iterates of the two constraint sets (Frobenius).
    pub residual: f64,
    pub iterations: usize,
    /// Symmetrised final iterate: a PSD, copy-symmetric state whose marginal is within
    /// `residual`-order of `rho`. Reported for feasible verdicts.
    pub extension: Option<DensityMatrix>,
    pub extended_layout: RegisterLayout,
}

struct KExtProblem {
    n: usize,
    d0: usize,
    sym: CopySymmetrizer,
    ext_dims: Vec<usize>,
    base: Vec<usize>,
    rho: CMatrix,
    kinv: CMatrix,
}

impl KExtProblem {
    fn new(rho: &DensityMatrix, cut: &Cut, k: usize, extend: &Extend) -> Result<Self> {
        let parties = extend.parties(cut.parties());
        let (ext, copies) = extended_layout(rho.layout(), cut, &parties, k)?;
        let ext_dims = ext.dims().to_vec();
        let sym = CopySymmetrizer::new(&ext_dims, &copies);
        let base: Vec<usize> = (0..rho.layout().len()).collect();
        let d0 = rho.dim();
        let n = ext.dim();
        let mut p = Self { n, d0, sym, ext_dims, base, rho: rho.matrix().clone(), kinv: CMatrix::zeros(0, 0) };
        // K: Lambda -> marginal(sym(Lambda (x) I)), as a d0^2 x d0^2 matrix
        let mut kmat = CMatrix::zeros(d0 * d0, d0 * d0);
        for a in 0..d0 {
            for b in 0..d0 {
                let mut e = CMatrix::zeros(d0, d0);
                e[(a, b)] = ONE;
                let img = p.marginal(&p.sym.apply(&p.lift(&e)));
                for (idx, z) in img.iter().enumerate() {
                    kmat[(idx, b * d0 + a)] = *z;
                }
            }
        }
        p.kinv = kmat.pseudo_inverse(1e-12).map_err(|e| Error::InvalidArgument(e.to_string()))?;
        Ok(p)
    }

    fn lift(&self, x: &CMatrix) -> CMatrix {
        let extra = self.n / self.d0;
        linalg::kron(x, &CMatrix::identity(extra, extra))
    }

    fn marginal(&self, x: &CMatrix) -> CMatrix {
        linalg::partial_trace(x, &self.ext_dims, &self.base)
    }

    /// Projection onto {symmetric, marginal = rho}.
    fn project_affine(&self, y: &CMatrix) -> CMatrix {
        let sy = self.sym.apply(y);
        let diff = self.marginal(&sy) - &self.rho;
        let dv = CVector::from_iterator(self.d0 * self.d0, diff.iter().copied());
        let lam = &self.kinv * dv;
        let lam = CMatrix::from_iterator(self.d0, self.d0, lam.iter().copied());
        sy - self.sym.apply(&self.lift(&lam))
    }

    /// Projection onto {PSD, trace 1}.
    fn project_states(y: &CMatrix) -> CMatrix {
        let (vals, vecs) = linalg::eigh(y);
        let p = project_simplex(&vals);
        linalg::spectral_map(&p, &vecs, |x| x)
    }
}

/// Dykstra alternating projections between `{PSD, trace 1}` and
/// `{copy-symmetric, marginal = rho}`. Feasible iff the residual falls below `1e-6`;
/// infeasible verdicts only mean the residual stalled.
pub fn k_ext_feasible(
    rho: &DensityMatrix,
    cut: &Cut,
    k: usize,
    extend: &Extend,
    iters: usize,
    warm_start: Option<&DensityMatrix>,
) -> Result<KExtFeasibility> {
    let prob = KExtProblem::new(rho, cut, k, extend)?;
    let parties = extend.parties(cut.parties());
    let (ext_layout, _) = extended_layout(rho.layout(), cut, &parties, k)?;
    let mut x = match warm_start {
        Some(w) if w.dim() == prob.n => w.matrix().clone(),
        _ => prob.lift(rho.matrix()).unscale((prob.n / prob.d0) as f64),
    };
    let mut p = CMatrix::zeros(prob.n, prob.n);
    let mut q = CMatrix::zeros(prob.n, prob.n);
    let mut residual = f64::INFINITY;
    let mut used = 0;
    for it in 0..iters.max(1) {
        used = it + 1;
        let y = prob.project_affine(&(&x + &p));
        p = &x + &p - &y;
        let xn = KExtProblem::project_states(&(&y + &q));
        q = &y + &q - &xn;
        residual = (&xn - &y).norm();
        x = xn;
        if residual < 1e-10 {
            break;
        }
    }
    let feasible = residual < 1e-6;
    let extension = if feasible {
        let s = prob.sym.apply(&x);
        Some(DensityMatrix::from_parts_unchecked(linalg::hermitize(&s), ext_layout.clone()))
    } else {
        None
    };
    Ok(KExtFeasibility { feasible, residual, iterations: used, extension, extended_layout: ext_layout })
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct ExtensionCheck {
    pub marginal_error: f64,
    pub symmetry_error: f64,
    pub min_eigenvalue: f64,
}

/// Checks a candidate extension: marginal, copy symmetry and positivity.
pub fn verify_extension(rho: &DensityMatrix, cut: &Cut, k: usize, extend: &Extend, ext: &DensityMatrix) -> Result<ExtensionCheck> {
    let prob = KExtProblem::new(rho, cut, k, extend)?;
    if ext.dim() != prob.n {
        return Err(Error::LayoutMismatch("extension has the wrong dimension".into()));
    }
    Ok(ExtensionCheck {
        marginal_error: linalg::max_abs(&(prob.marginal(ext.matrix()) - rho.matrix())),
        symmetry_error: prob.sym.symmetry_deviation(ext.matrix()),
        min_eigenvalue: linalg::eigvalsh(ext.matrix())[0],
    })
}

#[derive(Debug, Clone)]
pub struct ExtendibleDistance {
    /// Certified: every k-extendible `tau` has `||rho - tau||_1 >= lower`.
    pub lower: f64,
    /// Attained by the explicit k-extendible state `nearest`.
    pub upper: f64,
    pub nearest: DensityMatrix,
    /// Witness `W` with `||W||_inf <= 1` certifying `lower`.
    pub witness: CMatrix,
}

/// Two-sided bounds on the trace distance from `rho` to the k-extendible set.
///
/// Upper bound: the marginal of a symmetrised Dykstra iterate is k-extendible.
/// Lower bound: for `||W||_inf <= 1`, `Tr[W rho] - lambda_max(G(W (x) I))` where `G`
/// symmetrises over copies; improved by projected supergradient steps.
pub fn distance_to_extendible(
    rho: &DensityMatrix,
    cut: &Cut,
    k: usize,
    extend: &Extend,
    iters: usize,
) -> Result<ExtendibleDistance> {
    let prob = KExtProblem::new(rho, cut, k, extend)?;
    let feas = k_ext_feasible(rho, cut, k, extend, iters, None)?;
    // an explicit k-extendible state: marginal of the symmetrised PSD iterate
    let x = match &feas.extension {
        Some(e) => e.matrix().clone(),
        None => {
            let mut x = prob.lift(rho.matrix()).unscale((prob.n / prob.d0) as f64);
            let mut p = CMatrix::zeros(prob.n, prob.n);
            let mut q = CMatrix::zeros(prob.n, prob.n);
            for _ in 0..iters.max(1) {
                let y = prob.project_affine(&(&x + &p));
                p = &x + &p - &y;
                let xn = KExtProblem::project_states(&(&y + &q));
                q = &y + &q - &xn;
                x = xn;
            }
            x
        }
    };
    let ext = linalg::hermitize(&prob.sym.apply(&x));
    let tau = prob.marginal(&ext);
    let tau = tau.unscale(tau.trace().re);
    let upper = trace_dist_m(rho.matrix(), &tau);

    let value = |w: &CMatrix| -> (f64, CVector) {
        let g = prob.sym.apply(&prob.lift(w));
        let (lm, v) = linalg::leading_eigvec(&g);
        ((w * rho.matrix()).trace().re - lm, v)
    };
    let clip = |w: &CMatrix| {
        let (vals, vecs) = linalg::eigh(&linalg::hermitize(w));
        linalg::spectral_map(&vals, &vecs, |l| l.clamp(-1.0, 1.0))
    };
    let mut w = linalg::hermitian_sign(&(rho.matrix() - &tau));
    let (mut best, mut v) = value(&w);
    let mut step = 0.5;
    for _ in 0..200 {
        // supergradient: rho - marginal(G(v v^dagger))
        let grad = rho.matrix() - prob.marginal(&prob.sym.apply(&linalg::projector(&v)));
        let cand = clip(&(&w + grad.scale(step)));
        let (val, vv) = value(&cand);
        if val > best + 1e-14 {
            best = val;
            w = cand;
            v = vv;
            step *= 1.2;
        } else {
            step *= 0.5;
            if step < 1e-6 {
                break;
            }
        }
    }
    Ok(ExtendibleDistance {
        lower: best.max(0.0),
        upper,
        nearest: DensityMatrix::from_parts_unchecked(linalg::hermitize(&tau), rho.layout().clone()),
        witness: w,
    })
}

// ---------------------------------------------------------------------------
// parameter formulas
// ---------------------------------------------------------------------------

/// Promise-gap parameter bundle.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KExtParams {
    pub l: usize,
    pub k: usize,
    /// Total dimension.
    pub d: usize,
    pub epsilon: f64,
    pub delta: f64,
    pub alpha: f64,
    pub beta: f64,
}

impl KExtParams {
    pub fn validate(&self) -> Result<()> {
        if self.k < 1 || self.l < 2 || self.d < 4 {
            return Err(Error::InvalidArgument("need k >= 1, l >= 2, D >= 4".into()));
        }
        if !(0.0 <= self.delta && self.delta < self.epsilon) {
            return Err(Error::InvalidArgument("need 0 <= delta < epsilon".into()));
        }
        Ok(())
    }
}

/// `ceil(l + 4 l^2 log2 D / (epsilon - delta)^2)`.
pub fn choose_k(l: usize, d: usize, epsilon: f64, delta: f64) -> Result<u64> {
    if epsilon <= delta {
        return Err(Error::InvalidArgument("epsilon must exceed delta".into()));
    }
    let l = l as f64;
    let gap = epsilon - delta;
    Ok((l + 4.0 * l * l * (d as f64).log2() / (gap * gap)).ceil() as u64)
}

/// `sqrt(4 l^2 log2 D / (k - l))`.
pub fn bh_bound(l: usize, d: usize, k: usize) -> Result<f64> {
    if k <= l {
        return Err(Error::InvalidArgument("need k > l".into()));
    }
    let l = l as f64;
    Ok((4.0 * l * l * (d as f64).log2() / (k as f64 - l)).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::state::{max_entangled, BellKind};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn simplex_projection() {
        let p = project_simplex(&[0.5, 0.5, 0.5]);
        assert!(p.iter().all(|x| (x - 1.0 / 3.0).abs() < 1e-15));
        let p = project_simplex(&[2.0, 0.0]);
        assert_eq!(p, vec![1.0, 0.0]);
    }

    #[test]
    fn ppt_examples() {
        let cut = Cut::finest(2);
        let phi = max_entangled(1, BellKind::PhiPlus).unwrap().to_density().unwrap();
        let c = ppt_check(&phi, &cut).unwrap();
        assert!((c.min_eigenvalue + 0.5).abs() < 1e-12);
        assert_eq!(c.verdict, PptVerdict::Entangled);
        let w = crate::locc::WernerState::new(0.5).unwrap().density();
        let c = ppt_check(&w, &cut).unwrap();
        assert!(c.min_eigenvalue.abs() < 1e-9 && c.ppt);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let e = ProductEnsemble::random(&[2, 2], 1, &mut rng);
        let c = ppt_check(&e.state(&RegisterLayout::qubits(2), &cut).unwrap(), &cut).unwrap();
        assert!(c.min_eigenvalue >= -1e-12 && c.verdict == PptVerdict::Separable);
        assert!(ppt_check(&e.state(&RegisterLayout::qubits(2), &cut).unwrap(), &Cut::new(vec![vec![0, 1]], 2).unwrap()).is_err());
    }

    #[test]
    fn pure_product_examples() {
        let phi = max_entangled(1, BellKind::PhiPlus).unwrap();
        let r = nearest_pure_product(&phi, &Cut::finest(2), &SeesawParams::default()).unwrap();
        assert!((r.overlap - 0.5).abs() < 1e-9);
        let w = 1.0 / 3f64.sqrt();
        let mut v = CVector::zeros(8);
        v[1] = linalg::c(w, 0.);
        v[2] = linalg::c(w, 0.);
        v[4] = linalg::c(w, 0.);
        let wst = PureState::new(v, RegisterLayout::qubits(3)).unwrap();
        let r = nearest_pure_product(&wst, &Cut::finest(3), &SeesawParams { restarts: 16, iters: 500, seed: 3 }).unwrap();
        assert!((r.overlap - 4.0 / 9.0).abs() < 1e-8, "{}", r.overlap);
        assert!(r.history.windows(2).all(|h| h[1] >= h[0]));
    }

    #[test]
    fn separable_input_is_close() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let layout = RegisterLayout::qubits(2);
        let cut = Cut::finest(2);
        let e = ProductEnsemble::random(&[2, 2], 3, &mut rng);
        let rho = e.state(&layout, &cut).unwrap();
        let r = nearest_separable(&rho, &cut, &NearestSeparableParams { restarts: 4, iters: 400, ..Default::default() }).unwrap();
        assert!(r.distance <= 1e-6, "{}", r.distance);
        assert!(r.history.windows(2).all(|h| h[1] <= h[0] + 1e-12));
        let phi = max_entangled(1, BellKind::PhiPlus).unwrap().to_density().unwrap();
        let r = nearest_separable(&phi, &cut, &NearestSeparableParams { restarts: 4, iters: 200, ..Default::default() }).unwrap();
        assert!(r.distance >= crate::locc::fvg_sep_bound(1) - 1e-9);
        assert!((r.distance - 1.0).abs() < 1e-3, "{}", r.distance);
        let mm = DensityMatrix::maximally_mixed(layout).unwrap();
        let r = nearest_separable(&mm, &cut, &NearestSeparableParams { restarts: 2, iters: 400, ..Default::default() }).unwrap();
        assert!(r.distance <= 1e-6, "{}", r.distance);
    }

    #[test]
    fn k_extension_marginal_and_symmetry() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let layout = RegisterLayout::qubits(2);
        let cut = Cut::finest(2);
        let e = ProductEnsemble::random(&[2, 2], 3, &mut rng);
        let rho = e.state(&layout, &cut).unwrap();
        let one = k_extension(&e, &layout, &cut, 1, 1).unwrap();
        assert!(linalg::max_abs(&(one.matrix() - rho.matrix())) < 1e-12);
        let ext = k_extension(&e, &layout, &cut, 1, 3).unwrap();
        let back = ext.partial_trace(&[0, 1]).unwrap();
        assert!(linalg::max_abs(&(back.matrix() - rho.matrix())) < 1e-10);
        let p = crate::spectests::permutation_test_prob(&ext, &[1, 2, 3]).unwrap();
        assert!((p - 1.0).abs() < 1e-10);
        let chk = verify_extension(&rho, &cut, 3, &Extend::Party(1), &ext).unwrap();
        assert!(chk.marginal_error < 1e-10 && chk.symmetry_error < 1e-10);
    }

    #[test]
    fn kext_feasibility_examples() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let layout = RegisterLayout::qubits(2);
        let cut = Cut::finest(2);
        let e = ProductEnsemble::random(&[2, 2], 3, &mut rng);
        let rho = e.state(&layout, &cut).unwrap();
        let ext = k_extension_parties(&e, &layout, &cut, &[0, 1], 2).unwrap();
        let f = k_ext_feasible(&rho, &cut, 2, &Extend::AllParties, 50, Some(&ext)).unwrap();
        assert!(f.feasible && f.residual < 1e-8);
        let phi = max_entangled(1, BellKind::PhiPlus).unwrap().to_density().unwrap();
        let f = k_ext_feasible(&phi, &cut, 2, &Extend::AllParties, 500, None).unwrap();
        assert!(!f.feasible && f.residual > 1e-3, "{}", f.residual);
        let f = k_ext_feasible(&phi, &cut, 1, &Extend::AllParties, 50, None).unwrap();
        assert!(f.feasible);
    }

    #[test]
    fn extendible_distance_bounds_are_ordered() {
        let phi = max_entangled(1, BellKind::PhiPlus).unwrap().to_density().unwrap();
        let d = distance_to_extendible(&phi, &Cut::finest(2), 2, &Extend::Party(1), 300).unwrap();
        assert!(d.lower > 0.1 && d.lower <= d.upper + 1e-9, "{} {}", d.lower, d.upper);
    }

    #[test]
    fn formulas() {
        assert_eq!(choose_k(2, 16, 0.5, 0.25).unwrap(), 1026);
        assert_eq!(choose_k(2, 4, 1.0, 0.0).unwrap(), 34);
        assert!(choose_k(2, 4, 0.3, 0.3).is_err());
        assert_eq!(bh_bound(2, 16, 6).unwrap(), 4.0);
        assert!(bh_bound(2, 16, 2).is_err());
    }
}
