//! Hermitian eigendecomposition (cyclic two-sided Jacobi) and complex SVD
//! (one-sided Jacobi). Both are chosen for accuracy rather than speed: at the
//! matrix sizes handled here the zero singular values of rank-deficient
//! operators must stay at machine-noise level, well below the rank tolerance,
//! or range projectors and partial isometries come out with the wrong rank.

use num_complex::Complex64;

use super::matrix::ComplexMatrix;
use super::{LinalgError, LinalgResult};

const MAX_SWEEPS: usize = 100;

/// Eigendecomposition of a Hermitian matrix: M = V diag(eigenvalues) V^dagger.
#[derive(Clone, Debug)]
pub struct HermitianEigen {
    /// Real eigenvalues in ascending order.
    pub eigenvalues: Vec<f64>,
    /// Unitary matrix whose columns are the corresponding eigenvectors.
    pub eigenvectors: ComplexMatrix,
}

impl HermitianEigen {
    /// V f(diag) V^dagger.
    pub fn apply_spectral_fn(&self, f: impl Fn(f64) -> f64) -> ComplexMatrix {
        let n = self.eigenvalues.len();
        let v = &self.eigenvectors;
        let mut out = ComplexMatrix::zeros(n, n);
        for (k, &lambda) in self.eigenvalues.iter().enumerate() {
            let w = f(lambda);
            if w == 0.0 {
                continue;
            }
            for i in 0..n {
                let vi = v[(i, k)] * w;
                for j in 0..n {
                    out[(i, j)] += vi * v[(j, k)].conj();
                }
            }
        }
        out
    }

    pub fn reconstruct(&self) -> ComplexMatrix {
        self.apply_spectral_fn(|x| x)
    }
}

/// Singular value decomposition A = U diag(s) V^dagger with s descending.
/// U is rows x rows and V is cols x cols, both unitary (null-space columns
/// completed by Gram-Schmidt).
#[derive(Clone, Debug)]
pub struct Svd {
    pub u: ComplexMatrix,
    pub singular_values: Vec<f64>,
    pub v: ComplexMatrix,
}

impl Svd {
    pub fn largest(&self) -> f64 {
        self.singular_values.first().copied().unwrap_or(0.0)
    }

    pub fn reconstruct(&self) -> ComplexMatrix {
        let (m, n) = (self.u.rows(), self.v.rows());
        let mut sigma = ComplexMatrix::zeros(m, n);
        for (i, &s) in self.singular_values.iter().enumerate() {
            sigma[(i, i)] = Complex64::new(s, 0.0);
        }
        &(&self.u * &sigma) * &self.v.dagger()
    }
}

/// Eigendecomposition of a Hermitian matrix by cyclic complex Jacobi
/// rotations. The input is symmetrized internally; a relative Hermiticity
/// defect above 1e-8 is rejected.
pub fn eig_hermitian(m: &ComplexMatrix) -> LinalgResult<HermitianEigen> {
    assert!(m.is_square(), "eig_hermitian requires a square matrix");
    let n = m.rows();
    let scale = m.frobenius_norm();
    if m.hermitian_defect() > 1e-8 * scale.max(f64::MIN_POSITIVE) {
        return Err(LinalgError::NotHermitian { defect: m.hermitian_defect() });
    }

    let mut h = m.hermitian_part();
    let mut v = ComplexMatrix::identity(n);
    if n == 1 {
        return Ok(sorted_eigen(vec![h[(0, 0)].re], v));
    }

    let off = |h: &ComplexMatrix| -> f64 {
        let mut sum = 0.0;
        for i in 0..n {
            for j in 0..n {
                if i != j {
                    sum += h[(i, j)].norm_sqr();
                }
            }
        }
        sum.sqrt()
    };

    let stop = 1e-15 * scale.max(f64::MIN_POSITIVE);
    for _ in 0..MAX_SWEEPS {
        if off(&h) <= stop {
            let eigenvalues: Vec<f64> = (0..n).map(|i| h[(i, i)].re).collect();
            return Ok(sorted_eigen(eigenvalues, v));
        }
        for p in 0..n - 1 {
            for q in p + 1..n {
                let beta = h[(p, q)];
                let beta_abs = beta.norm();
                if beta_abs <= 1e-300 {
                    continue;
                }
                // Unit phase of the pivot so the 2x2 problem becomes real.
                let phase = beta / beta_abs;
                let alpha = h[(p, p)].re;
                let gamma = h[(q, q)].re;
                let theta = (gamma - alpha) / (2.0 * beta_abs);
                let t = theta.signum() / (theta.abs() + (1.0 + theta * theta).sqrt());
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = t * c;
                apply_rotation(&mut h, &mut v, p, q, c, s, phase);
            }
        }
    }
    Err(LinalgError::NoConvergence { what: "hermitian Jacobi eigensolver" })
}

/// Two-sided update H <- J^dagger H J and accumulation V <- V J, where J acts
/// on the (p, q) plane as [[c, s*phase], [-s*conj(phase), c]].
fn apply_rotation(
    h: &mut ComplexMatrix,
    v: &mut ComplexMatrix,
    p: usize,
    q: usize,
    c: f64,
    s: f64,
    phase: Complex64,
) {
    let n = h.rows();
    let sp = phase * s;
    // Columns: H[:, p], H[:, q].
    for i in 0..n {
        let hip = h[(i, p)];
        let hiq = h[(i, q)];
        h[(i, p)] = hip * c - hiq * sp.conj();
        h[(i, q)] = hip * sp + hiq * c;
    }
    // Rows: H[p, :], H[q, :] (conjugated coefficients).
    for j in 0..n {
        let hpj = h[(p, j)];
        let hqj = h[(q, j)];
        h[(p, j)] = hpj * c - hqj * sp;
        h[(q, j)] = hpj * sp.conj() + hqj * c;
    }
    // Keep the pivot pair numerically Hermitian.
    h[(p, q)] = (h[(p, q)] + h[(q, p)].conj()) * 0.5;
    h[(q, p)] = h[(p, q)].conj();
    h[(p, p)] = Complex64::new(h[(p, p)].re, 0.0);
    h[(q, q)] = Complex64::new(h[(q, q)].re, 0.0);

    for i in 0..v.rows() {
        let vip = v[(i, p)];
        let viq = v[(i, q)];
        v[(i, p)] = vip * c - viq * sp.conj();
        v[(i, q)] = vip * sp + viq * c;
    }
}

fn sorted_eigen(eigenvalues: Vec<f64>, eigenvectors: ComplexMatrix) -> HermitianEigen {
    let n = eigenvalues.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eigenvalues[a].total_cmp(&eigenvalues[b]));
    let sorted_vals: Vec<f64> = order.iter().map(|&i| eigenvalues[i]).collect();
    let cols: Vec<Vec<Complex64>> = order.iter().map(|&i| eigenvectors.column(i)).collect();
    HermitianEigen {
        eigenvalues: sorted_vals,
        eigenvectors: ComplexMatrix::from_columns(n, &cols),
    }
}

/// Complex SVD by one-sided Jacobi: columns of A V are rotated pairwise until
/// mutually orthogonal, so A V = U diag(s). High relative accuracy keeps the
/// numerically-zero singular values of rank-deficient inputs near machine
/// epsilon instead of sqrt(epsilon).
pub fn svd(a: &ComplexMatrix) -> LinalgResult<Svd> {
    if a.rows() < a.cols() {
        // Work on the adjoint so the column count is minimal, then swap back.
        let t = svd(&a.dagger())?;
        return Ok(Svd { u: t.v, singular_values: t.singular_values, v: t.u });
    }
    let (m, n) = a.shape();
    let mut w = a.clone();
    let mut v = ComplexMatrix::identity(n);

    let col_dot = |w: &ComplexMatrix, p: usize, q: usize| -> Complex64 {
        let mut sum = Complex64::new(0.0, 0.0);
        for i in 0..m {
            sum += w[(i, p)].conj() * w[(i, q)];
        }
        sum
    };
    let col_norm_sqr = |w: &ComplexMatrix, p: usize| -> f64 {
        (0..m).map(|i| w[(i, p)].norm_sqr()).sum()
    };

    let mut converged = false;
    for _ in 0..MAX_SWEEPS {
        let mut rotated = false;
        for p in 0..n.saturating_sub(1) {
            for q in p + 1..n {
                let app = col_norm_sqr(&w, p);
                let aqq = col_norm_sqr(&w, q);
                let apq = col_dot(&w, p, q);
                let apq_abs = apq.norm();
                // Skip pairs that are already orthogonal relative to the
                // column norms (or involve a numerically zero column).
                if apq_abs <= 1e-300 || apq_abs <= 1e-15 * (app * aqq).sqrt() {
                    continue;
                }
                rotated = true;
                let phase = apq / apq_abs;
                let theta = (aqq - app) / (2.0 * apq_abs);
                let t = theta.signum() / (theta.abs() + (1.0 + theta * theta).sqrt());
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = t * c;
                let sp = phase * s;
                for i in 0..m {
                    let wip = w[(i, p)];
                    let wiq = w[(i, q)];
                    w[(i, p)] = wip * c - wiq * sp.conj();
                    w[(i, q)] = wip * sp + wiq * c;
                }
                for i in 0..n {
                    let vip = v[(i, p)];
                    let viq = v[(i, q)];
                    v[(i, p)] = vip * c - viq * sp.conj();
                    v[(i, q)] = vip * sp + viq * c;
                }
            }
        }
        if !rotated {
            converged = true;
            break;
        }
    }
    if !converged && n > 1 {
        return Err(LinalgError::NoConvergence { what: "one-sided Jacobi SVD" });
    }

    // Column norms are the singular values; sort descending.
    let mut pairs: Vec<(f64, usize)> =
        (0..n).map(|j| (col_norm_sqr(&w, j).sqrt(), j)).collect();
    pairs.sort_by(|x, y| y.0.total_cmp(&x.0));
    let singular_values: Vec<f64> = pairs.iter().map(|p| p.0).collect();
    let s_max = singular_values.first().copied().unwrap_or(0.0);

    let v_cols: Vec<Vec<Complex64>> = pairs.iter().map(|&(_, j)| v.column(j)).collect();
    let v_sorted = ComplexMatrix::from_columns(n, &v_cols);

    // Left vectors: normalized nonzero columns, Gram-Schmidt completion for
    // the rest. Directions below the noise floor are unreliable, so they are
    // replaced by completion too.
    let noise = s_max * (m as f64) * f64::EPSILON * 16.0;
    let mut u_cols: Vec<Vec<Complex64>> = Vec::with_capacity(m);
    for &(s, j) in &pairs {
        if s > noise && s > 0.0 {
            let mut col = w.column(j);
            for z in col.iter_mut() {
                *z /= s;
            }
            orthogonalize_against(&mut col, &u_cols);
            u_cols.push(col);
        }
    }
    complete_basis(&mut u_cols, m);
    let u = ComplexMatrix::from_columns(m, &u_cols);

    Ok(Svd { u, singular_values, v: v_sorted })
}

/// Subtract projections onto `basis` and renormalize; `col` must not lie in
/// the span of `basis`.
fn orthogonalize_against(col: &mut [Complex64], basis: &[Vec<Complex64>]) {
    for b in basis {
        let overlap: Complex64 = b.iter().zip(col.iter()).map(|(x, y)| x.conj() * y).sum();
        for (c, x) in col.iter_mut().zip(b.iter()) {
            *c -= overlap * x;
        }
    }
    let norm: f64 = col.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    if norm > 0.0 {
        for c in col.iter_mut() {
            *c /= norm;
        }
    }
}

/// Extend an orthonormal set of dim-`dim` columns to a full basis using
/// standard basis vectors.
pub(crate) fn complete_basis(cols: &mut Vec<Vec<Complex64>>, dim: usize) {
    let mut candidate = 0usize;
    while cols.len() < dim {
        assert!(candidate < dim, "basis completion ran out of candidates");
        let mut col = vec![Complex64::new(0.0, 0.0); dim];
        col[candidate] = Complex64::new(1.0, 0.0);
        candidate += 1;
        for b in cols.iter() {
            let overlap: Complex64 = b.iter().zip(col.iter()).map(|(x, y)| x.conj() * y).sum();
            for (c, x) in col.iter_mut().zip(b.iter()) {
                *c -= overlap * x;
            }
        }
        let norm: f64 = col.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        if norm > 1e-8 {
            for c in col.iter_mut() {
                *c /= norm;
            }
            cols.push(col);
        }
    }
}
