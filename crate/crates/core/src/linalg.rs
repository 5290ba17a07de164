//! Dense complex linear algebra helpers.
//!
//! Registers are laid out big-endian: the first register is the most
//! significant digit of a basis index. All subsystem routines take the list
//! of register dimensions explicitly so they can be shared between pure
//! vectors and density matrices.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;

pub type CMatrix = DMatrix<Complex64>;
pub type CVector = DVector<Complex64>;

pub const ZERO: Complex64 = Complex64 { re: 0.0, im: 0.0 };
pub const ONE: Complex64 = Complex64 { re: 1.0, im: 0.0 };
pub const I: Complex64 = Complex64 { re: 0.0, im: 1.0 };

pub fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

pub fn strides(dims: &[usize]) -> Vec<usize> {
    let mut s = vec![1; dims.len()];
    for i in (0..dims.len().saturating_sub(1)).rev() {
        s[i] = s[i + 1] * dims[i + 1];
    }
    s
}

pub fn digits(mut index: usize, dims: &[usize]) -> Vec<usize> {
    let mut out = vec![0; dims.len()];
    for i in (0..dims.len()).rev() {
        out[i] = index % dims[i];
        index /= dims[i];
    }
    out
}

/// Offsets of every basis state of the listed registers inside the full index space,
/// enumerated big-endian in the order the registers are listed.
pub fn subsystem_offsets(dims: &[usize], regs: &[usize]) -> Vec<usize> {
    let st = strides(dims);
    let mut out = vec![0usize];
    for &r in regs {
        let mut next = Vec::with_capacity(out.len() * dims[r]);
        for &o in &out {
            for v in 0..dims[r] {
                next.push(o + v * st[r]);
            }
        }
        out = next;
    }
    out
}

pub fn complement(n: usize, regs: &[usize]) -> Vec<usize> {
    (0..n).filter(|i| !regs.contains(i)).collect()
}

pub fn kron(a: &CMatrix, b: &CMatrix) -> CMatrix {
    a.kronecker(b)
}

pub fn kron_vec(a: &CVector, b: &CVector) -> CVector {
    a.kronecker(b)
}

pub fn projector(v: &CVector) -> CMatrix {
    v * v.adjoint()
}

pub fn trace(m: &CMatrix) -> Complex64 {
    m.trace()
}

pub fn hermitize(m: &CMatrix) -> CMatrix {
    (m + m.adjoint()).scale(0.5)
}

pub fn hermitian_deviation(m: &CMatrix) -> f64 {
    (m - m.adjoint()).iter().map(|z| z.norm()).fold(0.0, f64::max)
}

pub fn max_abs(m: &CMatrix) -> f64 {
    m.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

/// Deviation of `m^\dagger m` from the identity (entrywise max).
pub fn isometry_deviation(m: &CMatrix) -> f64 {
    let g = m.adjoint() * m;
    max_abs(&(g - CMatrix::identity(m.ncols(), m.ncols())))
}

pub fn unitary_deviation(m: &CMatrix) -> f64 {
    if m.nrows() != m.ncols() {
        return f64::INFINITY;
    }
    isometry_deviation(m)
}

/// Hermitian eigendecomposition with eigenvalues sorted ascending.
/// The input is symmetrised before decomposition.
pub fn eigh(m: &CMatrix) -> (Vec<f64>, CMatrix) {
    let n = m.nrows();
    if n == 0 {
        return (vec![], CMatrix::zeros(0, 0));
    }
    let eig = hermitize(m).symmetric_eigen();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let vals = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let mut vecs = CMatrix::zeros(n, n);
    for (j, &i) in order.iter().enumerate() {
        vecs.set_column(j, &eig.eigenvectors.column(i));
    }
    (vals, vecs)
}

pub fn eigvalsh(m: &CMatrix) -> Vec<f64> {
    eigh(m).0
}

pub fn lambda_max(m: &CMatrix) -> f64 {
    eigvalsh(m).last().copied().unwrap_or(0.0)
}

/// Rebuilds `sum_i f(lambda_i) |v_i><v_i|` from a decomposition.
pub fn spectral_map(vals: &[f64], vecs: &CMatrix, f: impl Fn(f64) -> f64) -> CMatrix {
    let n = vecs.nrows();
    let mut out = CMatrix::zeros(n, n);
    for (j, &l) in vals.iter().enumerate() {
        let w = f(l);
        if w == 0.0 {
            continue;
        }
        let v = vecs.column(j);
        out += (v * v.adjoint()).scale(w);
    }
    out
}

/// Square root of a positive semidefinite matrix; negative eigenvalues are floored at zero.
pub fn sqrt_psd(m: &CMatrix) -> CMatrix {
    let (vals, vecs) = eigh(m);
    // eigenvalues at rounding level are treated as exact zeros
    let floor = 64.0 * f64::EPSILON * vals.iter().fold(1.0f64, |a, l| a.max(l.abs()));
    spectral_map(&vals, &vecs, |l| if l > floor { l.sqrt() } else { 0.0 })
}

/// Sum of absolute eigenvalues of a Hermitian matrix.
pub fn trace_norm_hermitian(m: &CMatrix) -> f64 {
    eigvalsh(m).iter().map(|l| l.abs()).sum()
}

/// Sum of singular values.
pub fn trace_norm_svd(m: &CMatrix) -> f64 {
    m.clone().singular_values().iter().sum()
}

/// `sign(m)` for a Hermitian matrix: projector onto the positive part minus the rest.
pub fn hermitian_sign(m: &CMatrix) -> CMatrix {
    let (vals, vecs) = eigh(m);
    spectral_map(&vals, &vecs, |l| if l > 0.0 { 1.0 } else { -1.0 })
}

/// Leading eigenvector of a Hermitian matrix with a deterministic tie-break.
///
/// A fixed 1e-12 diagonal ramp is added before decomposing so degenerate leading
/// spaces resolve to the same vector on every run; the phase is fixed so the
/// largest-magnitude component is real positive.
pub fn leading_eigvec(m: &CMatrix) -> (f64, CVector) {
    let n = m.nrows();
    let mut p = hermitize(m);
    for i in 0..n {
        p[(i, i)] += c(-1e-12 * i as f64 / n as f64, 0.0);
    }
    let (_, vecs) = eigh(&p);
    let v = fix_phase(vecs.column(n - 1).into_owned());
    let val = (v.adjoint() * m * &v)[(0, 0)].re;
    (val, v)
}

pub fn fix_phase(mut v: CVector) -> CVector {
    let mut best = 0;
    let mut best_abs = -1.0;
    for (i, z) in v.iter().enumerate() {
        // strict comparison with slack keeps the earliest index on near ties
        if z.norm() > best_abs + 1e-12 {
            best_abs = z.norm();
            best = i;
        }
    }
    if best_abs > 0.0 {
        let ph = v[best] / v[best].norm();
        v = v.map(|z| z / ph);
    }
    v
}

pub fn normalize(v: &CVector) -> CVector {
    let n = v.norm();
    if n == 0.0 {
        v.clone()
    } else {
        v.unscale(n)
    }
}

// ---------------------------------------------------------------------------
// subsystem manipulation
// ---------------------------------------------------------------------------

/// Partial trace keeping `keep` (kept registers appear in ascending order).
pub fn partial_trace(m: &CMatrix, dims: &[usize], keep: &[usize]) -> CMatrix {
    let mut keep: Vec<usize> = keep.to_vec();
    keep.sort_unstable();
    let rest = complement(dims.len(), &keep);
    let ok = subsystem_offsets(dims, &keep);
    let ot = subsystem_offsets(dims, &rest);
    let dk = ok.len();
    let mut out = CMatrix::zeros(dk, dk);
    for a in 0..dk {
        for b in 0..dk {
            let mut s = ZERO;
            for &t in &ot {
                s += m[(ok[a] + t, ok[b] + t)];
            }
            out[(a, b)] = s;
        }
    }
    out
}

/// Reduced density matrix of a pure vector on `keep` (ascending order).
pub fn partial_trace_vec(v: &CVector, dims: &[usize], keep: &[usize]) -> CMatrix {
    let mut keep: Vec<usize> = keep.to_vec();
    keep.sort_unstable();
    let rest = complement(dims.len(), &keep);
    let ok = subsystem_offsets(dims, &keep);
    let ot = subsystem_offsets(dims, &rest);
    // reshape to (kept x traced) and form A A^dagger
    let mut a = CMatrix::zeros(ok.len(), ot.len());
    for (i, &k) in ok.iter().enumerate() {
        for (j, &t) in ot.iter().enumerate() {
            a[(i, j)] = v[k + t];
        }
    }
    &a * a.adjoint()
}

/// Index map for reordering registers: new register `j` is old register `order[j]`.
/// Returns `map` with `new[i] = old[map[i]]`.
pub fn permutation_index_map(dims: &[usize], order: &[usize]) -> Vec<usize> {
    let new_dims: Vec<usize> = order.iter().map(|&o| dims[o]).collect();
    let offs = subsystem_offsets(dims, order);
    debug_assert_eq!(offs.len(), new_dims.iter().product::<usize>());
    offs
}

pub fn permute_vec(v: &CVector, dims: &[usize], order: &[usize]) -> CVector {
    let map = permutation_index_map(dims, order);
    CVector::from_iterator(map.len(), map.iter().map(|&i| v[i]))
}

pub fn permute_mat(m: &CMatrix, dims: &[usize], order: &[usize]) -> CMatrix {
    let map = permutation_index_map(dims, order);
    let n = map.len();
    CMatrix::from_fn(n, n, |i, j| m[(map[i], map[j])])
}

/// Applies `u` (acting on `targets`, in listed order) to a vector, restricted to
/// basis states of the remaining registers for which `active` holds.
pub fn apply_local_vec_filtered(
    v: &mut CVector,
    dims: &[usize],
    targets: &[usize],
    u: &CMatrix,
    active: impl Fn(usize) -> bool,
) {
    let rest = complement(dims.len(), targets);
    let ot = subsystem_offsets(dims, targets);
    let or = subsystem_offsets(dims, &rest);
    let t = ot.len();
    let mut buf = vec![ZERO; t];
    for &r in &or {
        if !active(r) {
            continue;
        }
        for (k, &o) in ot.iter().enumerate() {
            buf[k] = v[r + o];
        }
        for (i, &o) in ot.iter().enumerate() {
            let mut s = ZERO;
            for k in 0..t {
                s += u[(i, k)] * buf[k];
            }
            v[r + o] = s;
        }
    }
}

pub fn apply_local_vec(v: &mut CVector, dims: &[usize], targets: &[usize], u: &CMatrix) {
    apply_local_vec_filtered(v, dims, targets, u, |_| true);
}

/// `m -> U m U^dagger` with `U` acting on `targets`.
pub fn conjugate_local(m: &CMatrix, dims: &[usize], targets: &[usize], u: &CMatrix) -> CMatrix {
    let n = m.nrows();
    let mut out = m.clone();
    for j in 0..n {
        let mut col = out.column(j).into_owned();
        apply_local_vec(&mut col, dims, targets, u);
        out.set_column(j, &col);
    }
    let uc = u.map(|z| z.conj());
    for i in 0..n {
        let mut row = out.row(i).transpose();
        apply_local_vec(&mut row, dims, targets, &uc);
        out.set_row(i, &row.transpose());
    }
    out
}

/// Applies a linear map `f` to every local block `X[(t, r), (t', r')]` over the
/// target registers, for each pair of rest indices `(r, r')`.
pub fn map_local_blocks(
    m: &CMatrix,
    dims: &[usize],
    targets: &[usize],
    f: impl Fn(&CMatrix) -> CMatrix,
) -> CMatrix {
    let rest = complement(dims.len(), targets);
    let ot = subsystem_offsets(dims, targets);
    let or = subsystem_offsets(dims, &rest);
    let t = ot.len();
    let n = m.nrows();
    let mut out = CMatrix::zeros(n, n);
    let mut block = CMatrix::zeros(t, t);
    for &r in &or {
        for &rp in &or {
            for a in 0..t {
                for b in 0..t {
                    block[(a, b)] = m[(r + ot[a], rp + ot[b])];
                }
            }
            let nb = f(&block);
            for a in 0..t {
                for b in 0..t {
                    out[(r + ot[a], rp + ot[b])] = nb[(a, b)];
                }
            }
        }
    }
    out
}

/// Partial transpose over the listed registers.
pub fn partial_transpose(m: &CMatrix, dims: &[usize], regs: &[usize]) -> CMatrix {
    // transpose each register separately so the result does not depend on grouping
    let mut out = m.clone();
    for &r in regs {
        out = map_local_blocks(&out, dims, &[r], |b| b.transpose());
    }
    out
}

/// `X (x) I` on the complement registers, placed so `regs` land where listed.
pub fn embed_operator(op: &CMatrix, dims: &[usize], regs: &[usize]) -> CMatrix {
    let n: usize = dims.iter().product();
    let rest = complement(dims.len(), regs);
    let ot = subsystem_offsets(dims, regs);
    let or = subsystem_offsets(dims, &rest);
    let mut out = CMatrix::zeros(n, n);
    for &r in &or {
        for (a, &oa) in ot.iter().enumerate() {
            for (b, &ob) in ot.iter().enumerate() {
                out[(r + oa, r + ob)] = op[(a, b)];
            }
        }
    }
    out
}

// ---------------------------------------------------------------------------
// random sampling
// ---------------------------------------------------------------------------

pub fn gaussian<R: Rng + ?Sized>(rng: &mut R) -> Complex64 {
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    c(re, im)
}

/// Haar-random unit vector.
pub fn random_unit_vector<R: Rng + ?Sized>(d: usize, rng: &mut R) -> CVector {
    let v = CVector::from_fn(d, |_, _| gaussian(rng));
    normalize(&v)
}

/// Haar-random unitary via QR of a Ginibre matrix with phase correction.
pub fn random_unitary<R: Rng + ?Sized>(d: usize, rng: &mut R) -> CMatrix {
    let g = CMatrix::from_fn(d, d, |_, _| gaussian(rng));
    let qr = g.qr();
    let q = qr.q();
    let r = qr.r();
    let mut u = q.clone();
    for j in 0..d {
        let z = r[(j, j)];
        let ph = if z.norm() > 0.0 { z / z.norm() } else { ONE };
        let col = q.column(j) * ph;
        u.set_column(j, &col);
    }
    u
}

/// Random density matrix of the given rank (induced measure).
pub fn random_density_matrix<R: Rng + ?Sized>(d: usize, rank: usize, rng: &mut R) -> CMatrix {
    let g = CMatrix::from_fn(d, rank.max(1), |_, _| gaussian(rng));
    let m = &g * g.adjoint();
    let t = m.trace().re;
    m.unscale(t)
}

/// Random Hermitian matrix with Gaussian entries.
pub fn random_hermitian<R: Rng + ?Sized>(d: usize, rng: &mut R) -> CMatrix {
    let g = CMatrix::from_fn(d, d, |_, _| gaussian(rng));
    hermitize(&g)
}

/// Completes `v` (unit) to a unitary whose first column is `v`.
pub fn unitary_with_first_column(v: &CVector) -> CMatrix {
    let d = v.len();
    let mut cols: Vec<CVector> = vec![v.clone()];
    for k in 0..d {
        if cols.len() == d {
            break;
        }
        let mut e = CVector::zeros(d);
        e[k] = ONE;
        for c0 in &cols {
            let p = c0.dotc(&e);
            e -= c0 * p;
        }
        let n = e.norm();
        if n > 1e-8 {
            cols.push(e.unscale(n));
        }
    }
    // re-orthogonalise once for stability
    let mut out = CMatrix::zeros(d, d);
    for (j, col) in cols.iter().enumerate() {
        let mut e = col.clone();
        for i in 0..j {
            let prev = out.column(i).into_owned();
            let p = prev.dotc(&e);
            e -= prev * p;
        }
        out.set_column(j, &normalize(&e));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn partial_trace_vec_matches_dense() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let dims = [2, 3, 2];
        let v = random_unit_vector(12, &mut rng);
        let m = projector(&v);
        for keep in [vec![0], vec![1], vec![0, 2], vec![1, 2]] {
            let a = partial_trace(&m, &dims, &keep);
            let b = partial_trace_vec(&v, &dims, &keep);
            assert!(max_abs(&(a - b)) < 1e-12);
        }
    }

    #[test]
    fn permute_then_inverse_is_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let dims = [2, 3, 4];
        let v = random_unit_vector(24, &mut rng);
        let order = [2, 0, 1];
        let w = permute_vec(&v, &dims, &order);
        let new_dims = [4, 2, 3];
        // inverse of order [2,0,1] is [1,2,0]
        let back = permute_vec(&w, &new_dims, &[1, 2, 0]);
        assert!((back - v).norm() < 1e-14);
    }

    #[test]
    fn conjugate_local_matches_embedding() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let dims = [2, 2, 3];
        let rho = random_density_matrix(12, 3, &mut rng);
        let u = random_unitary(3, &mut rng);
        let full = embed_operator(&u, &dims, &[2]);
        let expect = &full * &rho * full.adjoint();
        let got = conjugate_local(&rho, &dims, &[2], &u);
        assert!(max_abs(&(expect - got)) < 1e-12);
    }

    #[test]
    fn random_unitary_is_unitary() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let u = random_unitary(6, &mut rng);
        assert!(unitary_deviation(&u) < 1e-12);
    }

    #[test]
    fn completion_is_unitary() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let v = random_unit_vector(5, &mut rng);
        let u = unitary_with_first_column(&v);
        assert!(unitary_deviation(&u) < 1e-12);
        assert!((u.column(0) - &v).norm() < 1e-12);
    }
}
