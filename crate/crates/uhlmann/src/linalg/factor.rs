//! Spectral factorizations built on the eigensolver and SVD: PSD square root,
//! Moore-Penrose pseudo-inverse, range projectors, left polar decomposition,
//! and partial-isometry utilities.
//!
//! Rank decisions everywhere use one global tolerance: a singular value or
//! eigenvalue counts as zero when it is at or below
//! `rank_tolerance() * max(largest singular value, 1)`. The factor can be
//! overridden per call through the `*_with_tol` variants, or process-wide via
//! [`set_rank_tolerance`].

use std::sync::atomic::{AtomicU64, Ordering};

use num_complex::Complex64;

use super::eigen::{complete_basis, eig_hermitian, svd, HermitianEigen, Svd};
use super::matrix::ComplexMatrix;
use super::{LinalgError, LinalgResult};

pub const DEFAULT_RANK_TOL: f64 = 1e-9;

static RANK_TOL_BITS: AtomicU64 = AtomicU64::new(0);

/// Current global rank-tolerance factor.
pub fn rank_tolerance() -> f64 {
    let bits = RANK_TOL_BITS.load(Ordering::Relaxed);
    if bits == 0 {
        DEFAULT_RANK_TOL
    } else {
        f64::from_bits(bits)
    }
}

/// Override the global rank-tolerance factor (e.g. from HOLONOMY_RANK_TOL).
pub fn set_rank_tolerance(tol: f64) {
    assert!(tol.is_finite() && tol > 0.0, "rank tolerance must be positive");
    RANK_TOL_BITS.store(tol.to_bits(), Ordering::Relaxed);
}

/// Absolute cutoff below which spectral values count as zero.
pub fn zero_cutoff(largest: f64, tol: f64) -> f64 {
    tol * largest.max(1.0)
}

/// Left polar decomposition A = positive_part * isometry_part.
#[derive(Clone, Debug)]
pub struct PolarFactors {
    /// sqrt(A A^dagger), positive semidefinite.
    pub positive_part: ComplexMatrix,
    /// Partial isometry with initial space R(A^dagger) and final space R(A).
    pub isometry_part: ComplexMatrix,
    pub is_full_rank: bool,
}

/// Square root of a positive semidefinite matrix. Eigenvalues inside
/// [-cutoff, cutoff] are treated as exactly zero; an eigenvalue below
/// -cutoff is a genuine error.
pub fn sqrt_psd(m: &ComplexMatrix) -> LinalgResult<ComplexMatrix> {
    sqrt_psd_with_tol(m, rank_tolerance())
}

pub fn sqrt_psd_with_tol(m: &ComplexMatrix, tol: f64) -> LinalgResult<ComplexMatrix> {
    let eigen = eig_hermitian(m)?;
    let largest = eigen.eigenvalues.iter().fold(0.0f64, |a, &b| a.max(b.abs()));
    let negative_floor = -1e-10 * largest.max(f64::MIN_POSITIVE);
    if let Some(&lo) = eigen.eigenvalues.first() {
        if lo < negative_floor {
            return Err(LinalgError::NotPsd { min_eigenvalue: lo });
        }
    }
    let cutoff = zero_cutoff(largest, tol).min(largest.max(f64::MIN_POSITIVE));
    Ok(eigen.apply_spectral_fn(|x| if x > cutoff { x.sqrt() } else { 0.0 }))
}

/// Moore-Penrose pseudo-inverse: singular values at or below the rank cutoff
/// are treated as zero.
pub fn mp_pinv(m: &ComplexMatrix) -> ComplexMatrix {
    mp_pinv_with_tol(m, rank_tolerance())
}

pub fn mp_pinv_with_tol(m: &ComplexMatrix, tol: f64) -> ComplexMatrix {
    let f = svd(m).expect("SVD failed to converge");
    let cutoff = zero_cutoff(f.largest(), tol);
    let mut out = ComplexMatrix::zeros(m.cols(), m.rows());
    accumulate_dyads(&mut out, &f, |s| if s > cutoff { 1.0 / s } else { 0.0 }, true);
    out
}

/// Orthogonal projector onto the range (column space) of M.
pub fn range_projector(m: &ComplexMatrix) -> ComplexMatrix {
    range_projector_with_tol(m, rank_tolerance())
}

pub fn range_projector_with_tol(m: &ComplexMatrix, tol: f64) -> ComplexMatrix {
    let f = svd(m).expect("SVD failed to converge");
    let cutoff = zero_cutoff(f.largest(), tol);
    let n = m.rows();
    let mut p = ComplexMatrix::zeros(n, n);
    for (k, &s) in f.singular_values.iter().enumerate() {
        if s <= cutoff {
            continue;
        }
        let col = f.u.column(k);
        for i in 0..n {
            for j in 0..n {
                p[(i, j)] += col[i] * col[j].conj();
            }
        }
    }
    p
}

/// Numerical rank at the given tolerance.
pub fn numerical_rank(m: &ComplexMatrix) -> usize {
    let f = svd(m).expect("SVD failed to converge");
    let cutoff = zero_cutoff(f.largest(), rank_tolerance());
    f.singular_values.iter().filter(|&&s| s > cutoff).count()
}

/// Left polar decomposition A = sqrt(A A^dagger) * V with V the canonical
/// partial isometry `sum_{s_i > cutoff} u_i v_i^dagger` from the SVD. For
/// rank-deficient A this V has initial space R(A^dagger) and final space
/// R(A); `is_full_rank` reports whether V is actually unitary.
pub fn polar_left(a: &ComplexMatrix) -> LinalgResult<PolarFactors> {
    polar_left_with_tol(a, rank_tolerance())
}

pub fn polar_left_with_tol(a: &ComplexMatrix, tol: f64) -> LinalgResult<PolarFactors> {
    assert!(a.is_square(), "polar_left requires a square matrix");
    let f = svd(a)?;
    let cutoff = zero_cutoff(f.largest(), tol);
    let n = a.rows();

    let mut positive = ComplexMatrix::zeros(n, n);
    accumulate_dyads_left(&mut positive, &f, |s| s);
    let mut isometry = ComplexMatrix::zeros(n, n);
    accumulate_dyads(&mut isometry, &f, |s| if s > cutoff { 1.0 } else { 0.0 }, false);

    let is_full_rank = f.singular_values.iter().all(|&s| s > cutoff);
    Ok(PolarFactors { positive_part: positive, isometry_part: isometry, is_full_rank })
}

/// out += sum_k f(s_k) * u_k v_k^dagger (or v_k u_k^dagger when `flip`).
fn accumulate_dyads(out: &mut ComplexMatrix, f: &Svd, weight: impl Fn(f64) -> f64, flip: bool) {
    for (k, &s) in f.singular_values.iter().enumerate() {
        let w = weight(s);
        if w == 0.0 {
            continue;
        }
        let u = f.u.column(k);
        let v = f.v.column(k);
        let (left, right) = if flip { (&v, &u) } else { (&u, &v) };
        for i in 0..left.len() {
            let li = left[i] * w;
            for j in 0..right.len() {
                out[(i, j)] += li * right[j].conj();
            }
        }
    }
}

/// out += sum_k f(s_k) * u_k u_k^dagger.
fn accumulate_dyads_left(out: &mut ComplexMatrix, f: &Svd, weight: impl Fn(f64) -> f64) {
    for (k, &s) in f.singular_values.iter().enumerate() {
        let w = weight(s);
        if w == 0.0 {
            continue;
        }
        let u = f.u.column(k);
        for i in 0..u.len() {
            let ui = u[i] * w;
            for j in 0..u.len() {
                out[(i, j)] += ui * u[j].conj();
            }
        }
    }
}

/// Extend a partial isometry to a unitary agreeing with it on its initial
/// space: U (V^dagger V) = V. The extension pairs the left and right
/// null-space bases in SVD order; it is deterministic but not unique.
pub fn complete_to_unitary(v: &ComplexMatrix) -> LinalgResult<ComplexMatrix> {
    assert!(v.is_square(), "complete_to_unitary requires a square matrix");
    if !is_partial_isometry(v) {
        return Err(LinalgError::NotPartialIsometry);
    }
    let f = svd(v).expect("SVD failed to converge");
    // Singular values of a partial isometry are 0 or 1; pair every left
    // vector with its right partner regardless.
    let n = v.rows();
    let mut out = ComplexMatrix::zeros(n, n);
    for k in 0..n {
        let u = f.u.column(k);
        let w = f.v.column(k);
        for i in 0..n {
            for j in 0..n {
                out[(i, j)] += u[i] * w[j].conj();
            }
        }
    }
    Ok(out)
}

/// True when V V^dagger V = V within tolerance 1e-8, i.e. all singular values
/// are 0 or 1.
pub fn is_partial_isometry(v: &ComplexMatrix) -> bool {
    let vvv = &(v * &v.dagger()) * v;
    vvv.distance(v) <= 1e-8 * (1.0 + v.frobenius_norm())
}

/// Projector equality under tolerance 1e-8.
pub fn projectors_equal(p: &ComplexMatrix, q: &ComplexMatrix) -> bool {
    p.shape() == q.shape() && p.distance(q) <= 1e-8 * (1.0 + p.frobenius_norm().max(q.frobenius_norm()))
}

/// Orthonormal basis of the range of M (columns), completed to the full space.
/// The first `rank` columns span R(M).
pub fn range_basis(m: &ComplexMatrix) -> (Vec<Vec<Complex64>>, usize) {
    let f = svd(m).expect("SVD failed to converge");
    let cutoff = zero_cutoff(f.largest(), rank_tolerance());
    let rank = f.singular_values.iter().filter(|&&s| s > cutoff).count();
    let mut cols: Vec<Vec<Complex64>> = (0..rank).map(|k| f.u.column(k)).collect();
    complete_basis(&mut cols, m.rows());
    (cols, rank)
}

/// Re-export used by density-matrix caching.
pub fn spectral_projector(eigen: &HermitianEigen, cutoff: f64) -> ComplexMatrix {
    eigen.apply_spectral_fn(|x| if x > cutoff { 1.0 } else { 0.0 })
}

/// exp(t S) for skew-Hermitian S, computed through the Hermitian
/// eigendecomposition of -iS; the result is unitary.
pub fn exp_skew(s: &ComplexMatrix, t: f64) -> LinalgResult<ComplexMatrix> {
    let h = s.scale_c(Complex64::new(0.0, -1.0));
    let eigen = eig_hermitian(&h)?;
    let n = s.rows();
    let v = &eigen.eigenvectors;
    let mut out = ComplexMatrix::zeros(n, n);
    for (k, &lambda) in eigen.eigenvalues.iter().enumerate() {
        let w = Complex64::new(0.0, lambda * t).exp();
        for i in 0..n {
            let vi = v[(i, k)] * w;
            for j in 0..n {
                out[(i, j)] += vi * v[(j, k)].conj();
            }
        }
    }
    Ok(out)
}
