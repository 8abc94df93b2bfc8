//! Preparation of the two-path encoded states as a uniform mixture of branch
//! pure states: a reference state falls onto a 50-50 beam splitter, a pair of
//! unitaries (one per path) is drawn from a shared random generator, and a
//! final path-1 mixture of unitaries realizes an arbitrary contraction
//! target. Executing a plan reproduces the block encoding exactly.

use num_complex::Complex64;
use serde::Serialize;
use thiserror::Error;

use crate::linalg::{complete_orthonormal_columns, svd, ComplexMatrix, LinalgError};
use crate::states::{DensityMatrix, StateError};

#[derive(Debug, Error)]
pub enum PreparationError {
    #[error(transparent)]
    Linalg(#[from] LinalgError),

    #[error(transparent)]
    State(#[from] StateError),

    #[error("target operator is not a contraction (largest singular value {0})")]
    NotContraction(f64),
}

pub type PreparationResult<T> = Result<T, PreparationError>;

/// Complete mixing recipe for one encoded state.
#[derive(Clone, Debug, Serialize)]
pub struct PreparationPlan {
    /// Number of branches, equal to the internal dimension N.
    pub branch_count: usize,
    /// Per-branch unitary pair (path 0, path 1), applied after the beam
    /// splitter with probability 1/N.
    pub branch_unitaries: Vec<(ComplexMatrix, ComplexMatrix)>,
    /// Branch probabilities, all 1/N.
    pub probabilities: Vec<f64>,
    /// The shared internal reference state fed into the interferometer.
    pub reference_state: ComplexMatrix,
    /// Final path-1 mixture of unitaries realizing the contraction target;
    /// absent when the target is the identity (plain sqrt(sigma) amplitude).
    pub final_mixture: Option<Vec<(f64, ComplexMatrix)>>,
}

impl PreparationPlan {
    /// Run the preparation literally: beam splitter, branch unitaries, final
    /// mixture. Returns the assembled 2N x 2N output state.
    pub fn execute(&self) -> ComplexMatrix {
        let n = self.branch_count;
        let d = 2 * n;
        let h = 1.0 / 2.0f64.sqrt();

        let mut rho = ComplexMatrix::zeros(d, d);
        for (j, (u0, u1)) in self.branch_unitaries.iter().enumerate() {
            // |eta>|0>, then the 50-50 beam splitter on the path qubit.
            let mut branch = vec![Complex64::new(0.0, 0.0); d];
            for (i, x) in self.reference_state.column(0).iter().enumerate() {
                branch[i] = x * h;
                branch[n + i] = x * h;
            }
            // Path-conditional unitaries.
            let mut steered = vec![Complex64::new(0.0, 0.0); d];
            for r in 0..n {
                for c in 0..n {
                    steered[r] += u0[(r, c)] * branch[c];
                    steered[n + r] += u1[(r, c)] * branch[n + c];
                }
            }
            let p = self.probabilities[j];
            for r in 0..d {
                for c in 0..d {
                    rho[(r, c)] += steered[r] * steered[c].conj() * p;
                }
            }
        }

        match &self.final_mixture {
            None => rho,
            Some(mixture) => {
                // Conjugating by blockdiag(1, X) maps the off-diagonal block
                // to b01 X^dagger, so hitting the target V-tilde on the right
                // requires the adjoint gate in path 1.
                let mut out = ComplexMatrix::zeros(d, d);
                for (mu, v) in mixture {
                    let mut gate = ComplexMatrix::identity(d);
                    gate.place(n, n, &v.dagger());
                    let term = &(&gate * &rho) * &gate.dagger();
                    out = &out + &term.scale(*mu);
                }
                out
            }
        }
    }
}

/// The orthogonal (not normalized) branch vectors
/// psi_k = sqrt(lambda_k / 2) |k>|0> + |k>|1> / sqrt(2N), one per eigenvector
/// of sigma including the null space. Their dyad sum is the encoding of the
/// canonical amplitude sqrt(sigma).
pub fn branch_vectors(sigma: &DensityMatrix) -> Vec<ComplexMatrix> {
    let n = sigma.dim();
    let inv = 1.0 / (2.0 * n as f64).sqrt();
    (0..n)
        .map(|k| {
            let lambda = sigma.eigenvalues()[k].max(0.0);
            let amp0 = (lambda / 2.0).sqrt();
            let col = sigma.eigenvectors().column(k);
            let mut v = vec![Complex64::new(0.0, 0.0); 2 * n];
            for (i, x) in col.iter().enumerate() {
                v[i] = x * amp0;
                v[n + i] = x * inv;
            }
            ComplexMatrix::column_vector(&v)
        })
        .collect()
}

/// A unitary whose squared moduli mix any spectrum to the uniform
/// distribution: the discrete Fourier matrix, |U_jk|^2 = 1/N, makes
/// sum_k |U_jk|^2 lambda_k = 1/N for every probability vector. The input
/// spectrum is only sanity-checked; the construction does not depend on it.
pub fn horn_unitary(eigenvalues: &[f64]) -> ComplexMatrix {
    let n = eigenvalues.len();
    assert!(n >= 1, "spectrum must be nonempty");
    debug_assert!(
        (eigenvalues.iter().sum::<f64>() - 1.0).abs() < 1e-8
            && eigenvalues.iter().all(|&l| l > -1e-10),
        "eigenvalues must form a probability vector"
    );
    let scale = 1.0 / (n as f64).sqrt();
    let step = 2.0 * std::f64::consts::PI / n as f64;
    ComplexMatrix::from_fn(n, n, |j, k| {
        Complex64::new(0.0, step * (j * k) as f64).exp() * scale
    })
}

/// Convex decomposition of a contraction into unitaries: with the SVD
/// V-tilde = U diag(s) X^dagger, the two unitaries
/// U diag(s_j +/- i sqrt(1 - s_j^2)) X^dagger average back to V-tilde with
/// weights 1/2 each. A unitary input decomposes trivially as itself.
pub fn contraction_to_unitaries(
    vtilde: &ComplexMatrix,
) -> PreparationResult<Vec<(f64, ComplexMatrix)>> {
    let f = svd(vtilde)?;
    if f.largest() > 1.0 + 1e-9 {
        return Err(PreparationError::NotContraction(f.largest()));
    }
    if f.singular_values.iter().all(|&s| (s - 1.0).abs() <= 1e-9) {
        return Ok(vec![(1.0, vtilde.clone())]);
    }
    let n = vtilde.rows();
    let build = |sign: f64| -> ComplexMatrix {
        let phases: Vec<Complex64> = f
            .singular_values
            .iter()
            .map(|&s| {
                let s = s.min(1.0);
                Complex64::new(s, sign * (1.0 - s * s).sqrt())
            })
            .collect();
        let mut out = ComplexMatrix::zeros(n, n);
        for (k, phase) in phases.iter().enumerate() {
            let u = f.u.column(k);
            let v = f.v.column(k);
            for i in 0..n {
                let ui = u[i] * phase;
                for j in 0..n {
                    out[(i, j)] += ui * v[j].conj();
                }
            }
        }
        out
    };
    Ok(vec![(0.5, build(1.0)), (0.5, build(-1.0))])
}

/// Assemble the full preparation plan for the encoded state of
/// (sigma, V-tilde): branch vectors from the spectrum, the Horn unitary to
/// flatten branch probabilities, per-branch path unitaries steering the
/// reference state, and the final contraction mixture.
pub fn build_plan(
    sigma: &DensityMatrix,
    vtilde: &ComplexMatrix,
) -> PreparationResult<PreparationPlan> {
    let n = sigma.dim();
    let top = svd(vtilde)?.largest();
    if top > 1.0 + 1e-9 {
        return Err(PreparationError::NotContraction(top));
    }

    let psis = branch_vectors(sigma);
    let horn = horn_unitary(sigma.eigenvalues());
    let sqrt_n = (n as f64).sqrt();

    let mut branch_unitaries = Vec::with_capacity(n);
    for j in 0..n {
        // |eta_j> = sqrt(N) sum_k U_jk |psi_k>.
        let mut eta = vec![Complex64::new(0.0, 0.0); 2 * n];
        for k in 0..n {
            let coeff = horn[(j, k)] * sqrt_n;
            for (i, x) in psis[k].column(0).iter().enumerate() {
                eta[i] += coeff * x;
            }
        }
        let weight0: f64 = eta[..n].iter().map(|z| z.norm_sqr()).sum();
        debug_assert!((weight0 - 0.5).abs() < 1e-10, "path-0 weight must be one half");

        // Split into the normalized per-path targets.
        let sqrt2 = 2.0f64.sqrt();
        let eta0: Vec<Complex64> = eta[..n].iter().map(|z| z * sqrt2).collect();
        let eta1: Vec<Complex64> = eta[n..].iter().map(|z| z * sqrt2).collect();
        branch_unitaries.push((steering_unitary(&eta0), steering_unitary(&eta1)));
    }

    let final_mixture = if vtilde.approx_eq(&ComplexMatrix::identity(n), 1e-12) {
        None
    } else {
        Some(contraction_to_unitaries(vtilde)?)
    };

    let mut reference = vec![Complex64::new(0.0, 0.0); n];
    reference[0] = Complex64::new(1.0, 0.0);
    Ok(PreparationPlan {
        branch_count: n,
        branch_unitaries,
        probabilities: vec![1.0 / n as f64; n],
        reference_state: ComplexMatrix::column_vector(&reference),
        final_mixture,
    })
}

/// Deterministic unitary sending the first standard basis vector to `target`
/// (assumed normalized): the target becomes the first column of an
/// orthonormal basis completed over the standard basis.
fn steering_unitary(target: &[Complex64]) -> ComplexMatrix {
    let n = target.len();
    let mut cols = vec![target.to_vec()];
    complete_orthonormal_columns(&mut cols, n);
    ComplexMatrix::from_columns(n, &cols)
}
