//! Dense complex linear algebra helpers shared by every module.
//!
//! Everything is built on `ndarray` with `Complex64` entries. Matrix
//! exponentials of (anti-)Hermitian generators go through an explicit
//! eigendecomposition so the results are unitary to machine precision,
//! which the verification suites rely on.

use ndarray::{Array1, Array2};
use ndarray_linalg::{Eig, Eigh, UPLO};
use num_complex::Complex64;

pub type C64 = Complex64;
pub type CMat = Array2<C64>;
pub type CVec = Array1<C64>;

pub const I1: C64 = C64::new(0.0, 1.0);

/// Conjugate transpose.
pub fn dagger(a: &CMat) -> CMat {
    a.t().mapv(|z| z.conj())
}

/// Largest entrywise modulus.
pub fn max_abs(a: &CMat) -> f64 {
    a.iter().fold(0.0_f64, |m, z| m.max(z.norm()))
}

/// `max_ij |a_ij - b_ij|`.
pub fn max_abs_diff(a: &CMat, b: &CMat) -> f64 {
    assert_eq!(a.dim(), b.dim());
    let mut m = 0.0_f64;
    for (x, y) in a.iter().zip(b.iter()) {
        m = m.max((x - y).norm());
    }
    m
}

/// `‖U†U − I‖_max`; zero for an exactly unitary matrix.
pub fn unitarity_defect(u: &CMat) -> f64 {
    let n = u.nrows();
    let mut g = dagger(u).dot(u);
    for i in 0..n {
        g[(i, i)] -= C64::new(1.0, 0.0);
    }
    max_abs(&g)
}

/// `‖A − A†‖_max`.
pub fn hermiticity_defect(a: &CMat) -> f64 {
    max_abs_diff(a, &dagger(a))
}

/// Eigendecomposition of a Hermitian matrix. Returns ascending eigenvalues
/// and the matrix whose columns are the eigenvectors, normalised so that
/// `H = V·diag(λ)·V†` holds for the returned `V`.
pub fn eigh(h: &CMat) -> (Array1<f64>, CMat) {
    let (vals, vecs) = h
        .eigh(UPLO::Lower)
        .expect("hermitian eigendecomposition failed");
    // The LAPACK binding hands back eigenvectors for the row-major view,
    // which reconstructs Hᵀ; conjugating restores the V·Λ·V† convention.
    (vals, vecs.mapv(|z| z.conj()))
}

/// `f(H)` for Hermitian `H`, with `f` applied to the eigenvalues.
pub fn hermitian_function(h: &CMat, f: impl Fn(f64) -> C64) -> CMat {
    let (vals, vecs) = eigh(h);
    let mut scaled = vecs.clone();
    for (j, &v) in vals.iter().enumerate() {
        let fz = f(v);
        scaled.column_mut(j).mapv_inplace(|z| z * fz);
    }
    scaled.dot(&dagger(&vecs))
}

/// `e^{−iHt}` for Hermitian `H`; unitary up to roundoff.
pub fn expi_hermitian(h: &CMat, t: f64) -> CMat {
    hermitian_function(h, |v| (-I1 * v * t).exp())
}

/// `e^{A}` for anti-Hermitian `A` (so `iA` is Hermitian); unitary up to roundoff.
pub fn exp_antihermitian(a: &CMat) -> CMat {
    let h = a.mapv(|z| z * I1);
    expi_hermitian(&h, 1.0)
}

/// Spectral norm (largest singular value) via the Gram matrix.
pub fn spectral_norm(a: &CMat) -> f64 {
    if a.is_empty() {
        return 0.0;
    }
    let g = dagger(a).dot(a);
    let (vals, _) = eigh(&g);
    vals.iter().fold(0.0_f64, |m, &v| m.max(v)).max(0.0).sqrt()
}

/// Kronecker product, first factor most significant.
pub fn kron(a: &CMat, b: &CMat) -> CMat {
    let (ra, ca) = a.dim();
    let (rb, cb) = b.dim();
    let mut out = CMat::zeros((ra * rb, ca * cb));
    for ia in 0..ra {
        for ja in 0..ca {
            let z = a[(ia, ja)];
            if z == C64::new(0.0, 0.0) {
                continue;
            }
            for ib in 0..rb {
                for jb in 0..cb {
                    out[(ia * rb + ib, ja * cb + jb)] = z * b[(ib, jb)];
                }
            }
        }
    }
    out
}

/// Kronecker product of a list of factors, left factor most significant.
pub fn kron_all(factors: &[&CMat]) -> CMat {
    assert!(!factors.is_empty());
    let mut acc = factors[0].clone();
    for f in &factors[1..] {
        acc = kron(&acc, f);
    }
    acc
}

pub fn identity(n: usize) -> CMat {
    CMat::eye(n)
}

/// Real diagonal matrix.
pub fn diag_real(d: &[f64]) -> CMat {
    let mut m = CMat::zeros((d.len(), d.len()));
    for (i, &v) in d.iter().enumerate() {
        m[(i, i)] = C64::new(v, 0.0);
    }
    m
}

/// Complex diagonal matrix.
pub fn diag_complex(d: &[C64]) -> CMat {
    let mut m = CMat::zeros((d.len(), d.len()));
    for (i, &v) in d.iter().enumerate() {
        m[(i, i)] = v;
    }
    m
}

/// `A·B·A†`.
pub fn sandwich(a: &CMat, b: &CMat) -> CMat {
    a.dot(b).dot(&dagger(a))
}

/// Commutator `[A, B]`.
pub fn commutator(a: &CMat, b: &CMat) -> CMat {
    &a.dot(b) - &b.dot(a)
}

/// Löwdin (symmetric) orthonormalisation of the columns of `a`:
/// returns `a (a†a)^{−1/2}`, the closest matrix with orthonormal columns.
pub fn loewdin(a: &CMat) -> CMat {
    let g = dagger(a).dot(a);
    let inv_sqrt = hermitian_function(&g, |v| C64::new(1.0 / v.max(1e-300).sqrt(), 0.0));
    a.dot(&inv_sqrt)
}

/// Complete `q` (orthonormal columns) to a square unitary by sweeping the
/// canonical basis in order and Gram-Schmidt-projecting; deterministic.
pub fn complete_to_unitary(q: &CMat) -> CMat {
    let (n, k) = q.dim();
    assert!(k <= n);
    let mut cols: Vec<CVec> = (0..k).map(|j| q.column(j).to_owned()).collect();
    let mut e = 0usize;
    while cols.len() < n {
        assert!(e < n, "failed to complete basis");
        let mut v = CVec::zeros(n);
        v[e] = C64::new(1.0, 0.0);
        e += 1;
        // Two Gram-Schmidt passes keep the completion orthogonal to
        // working precision even when the candidate is nearly dependent.
        for _ in 0..2 {
            for c in &cols {
                let ov: C64 = c.iter().zip(v.iter()).map(|(a, b)| a.conj() * b).sum();
                v = &v - &c.mapv(|z| z * ov);
            }
        }
        let nrm = v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        if nrm > 1e-8 {
            cols.push(v.mapv(|z| z / nrm));
        }
    }
    let mut u = CMat::zeros((n, n));
    for (j, c) in cols.iter().enumerate() {
        u.column_mut(j).assign(c);
    }
    u
}

/// Deterministic unitary whose first column is the given unit vector
/// (Householder reflection mapping `e_0` to `v`, with a phase fix).
pub fn unitary_with_first_column(v: &CVec) -> CMat {
    let n = v.len();
    let mut q = CMat::zeros((n, 1));
    q.column_mut(0).assign(v);
    complete_to_unitary(&q)
}

/// Eigenvalues and eigenvectors of a general (non-Hermitian) matrix.
pub fn eig_general(a: &CMat) -> (CVec, CMat) {
    a.eig().expect("general eigendecomposition failed")
}

/// Matrix logarithm of a unitary via its (normal) eigendecomposition.
/// Returns an anti-Hermitian generator `A` with `e^A = u`.
pub fn log_unitary(u: &CMat) -> CMat {
    let (vals, vecs) = eig_general(u);
    // A unitary matrix is normal, so its eigenvectors can be taken
    // orthonormal; Löwdin cleans up the zgeev output. The binding's
    // row-major view may hand back vectors for uᵀ, so pick whichever
    // orientation actually reconstructs u.
    let vecs = loewdin(&vecs);
    let d = diag_complex(&vals.to_vec());
    let candidates = [vecs.clone(), vecs.mapv(|z| z.conj())];
    let mut best: Option<(f64, &CMat)> = None;
    for v in &candidates {
        let defect = max_abs_diff(&sandwich(v, &d), u);
        if best.map_or(true, |(b, _)| defect < b) {
            best = Some((defect, v));
        }
    }
    let (_, v) = best.unwrap();
    let logs: Vec<C64> = vals.iter().map(|z| C64::new(0.0, z.arg())).collect();
    sandwich(v, &diag_complex(&logs))
}
