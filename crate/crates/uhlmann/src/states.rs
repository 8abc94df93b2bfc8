//! Density operators, amplitudes and subamplitudes, and the two-path block
//! encoding that carries an amplitude in its off-diagonal block.
//!
//! A state on the doubled space is stored as four N x N blocks b_xy with the
//! path index slowest, so the assembled 2N x 2N matrix has the blocks as
//! literal submatrices:
//!
//! ```text
//!   [ b00 b01 ]
//!   [ b10 b11 ]
//! ```

use num_complex::Complex64;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::linalg::{
    eig_hermitian, mp_pinv, rank_tolerance, spectral_projector, svd, zero_cutoff, ComplexMatrix,
    HermitianEigen, LinalgError,
};

#[derive(Debug, Error)]
pub enum StateError {
    #[error(transparent)]
    Linalg(#[from] LinalgError),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("matrix is not a density operator: {0}")]
    NotDensity(String),

    #[error("block state marginals do not match the prescribed states (error {0:.3e})")]
    MarginalMismatch(f64),

    #[error("state is not in the prescribed marginal class (reconstruction error {0:.3e})")]
    NotInQ(f64),

    #[error("largest singular value {0} exceeds the contraction bound")]
    NotContraction(f64),

    #[error("rank {rank} out of range for dimension {dim}")]
    BadRank { rank: usize, dim: usize },
}

pub type StateResult<T> = Result<T, StateError>;

/// Positive semidefinite, unit-trace operator with cached spectral data.
#[derive(Clone, Debug)]
pub struct DensityMatrix {
    mat: ComplexMatrix,
    eigen: HermitianEigen,
    sqrt: ComplexMatrix,
    support: ComplexMatrix,
    rank: usize,
}

impl DensityMatrix {
    /// Validates Hermiticity (1e-10), positivity (eigenvalues >= -1e-10) and
    /// unit trace (1e-10), then caches the eigendecomposition, the square
    /// root, and the support projector. Eigenvalues at or below the rank
    /// cutoff are treated as exactly zero in the cached data, so square roots
    /// of rank-deficient states carry no sqrt(noise) residue.
    pub fn new(mat: ComplexMatrix) -> StateResult<Self> {
        if !mat.is_square() {
            return Err(StateError::DimensionMismatch("density operator must be square".into()));
        }
        if !mat.all_finite() {
            return Err(StateError::NotDensity("entries must be finite".into()));
        }
        let defect = mat.hermitian_defect();
        if defect > 1e-10 * (1.0 + mat.frobenius_norm()) {
            return Err(StateError::NotDensity(format!("Hermiticity defect {defect:.3e}")));
        }
        let trace = mat.trace();
        if (trace.re - 1.0).abs() > 1e-10 || trace.im.abs() > 1e-10 {
            return Err(StateError::NotDensity(format!("trace {trace} is not one")));
        }
        let eigen = eig_hermitian(&mat)?;
        if let Some(&lo) = eigen.eigenvalues.first() {
            if lo < -1e-10 {
                return Err(StateError::NotDensity(format!("negative eigenvalue {lo:.3e}")));
            }
        }
        let cutoff = zero_cutoff(
            eigen.eigenvalues.last().copied().unwrap_or(0.0),
            rank_tolerance(),
        );
        let sqrt = eigen.apply_spectral_fn(|x| if x > cutoff { x.sqrt() } else { 0.0 });
        let support = spectral_projector(&eigen, cutoff);
        let rank = eigen.eigenvalues.iter().filter(|&&x| x > cutoff).count();
        Ok(Self { mat, eigen, sqrt, support, rank })
    }

    pub fn dim(&self) -> usize {
        self.mat.rows()
    }

    pub fn matrix(&self) -> &ComplexMatrix {
        &self.mat
    }

    /// Cached principal square root.
    pub fn sqrt(&self) -> &ComplexMatrix {
        &self.sqrt
    }

    /// Projector onto the range of the operator.
    pub fn support_projector(&self) -> &ComplexMatrix {
        &self.support
    }

    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigen.eigenvalues
    }

    pub fn eigenvectors(&self) -> &ComplexMatrix {
        &self.eigen.eigenvectors
    }

    pub fn rank(&self) -> usize {
        self.rank
    }

    /// Full rank, i.e. the range is the whole space.
    pub fn is_faithful(&self) -> bool {
        self.rank == self.dim()
    }

    pub fn maximally_mixed(n: usize) -> Self {
        Self::new(ComplexMatrix::identity(n).scale(1.0 / n as f64))
            .expect("maximally mixed state is valid")
    }

    pub fn pure(state: &[Complex64]) -> StateResult<Self> {
        let n = state.len();
        let norm_sqr: f64 = state.iter().map(|z| z.norm_sqr()).sum();
        if norm_sqr <= 0.0 {
            return Err(StateError::NotDensity("zero vector".into()));
        }
        let m = ComplexMatrix::from_fn(n, n, |i, j| state[i] * state[j].conj() / norm_sqr);
        Self::new(m)
    }
}

/// Operator W-tilde with W-tilde W-tilde^dagger <= sigma, stored as the pair
/// (sigma, V-tilde) with V-tilde V-tilde^dagger <= 1. Amplitudes are the
/// maximal case W W^dagger = sigma.
#[derive(Clone, Debug)]
pub struct Subamplitude {
    sigma: DensityMatrix,
    vtilde: ComplexMatrix,
}

impl Subamplitude {
    pub fn new(sigma: DensityMatrix, vtilde: ComplexMatrix) -> StateResult<Self> {
        if vtilde.shape() != (sigma.dim(), sigma.dim()) {
            return Err(StateError::DimensionMismatch(format!(
                "vtilde shape {:?} does not match dimension {}",
                vtilde.shape(),
                sigma.dim()
            )));
        }
        let top = svd(&vtilde).map_err(StateError::Linalg)?.largest();
        if top > 1.0 + 1e-9 {
            return Err(StateError::NotContraction(top));
        }
        Ok(Self { sigma, vtilde })
    }

    pub fn sigma(&self) -> &DensityMatrix {
        &self.sigma
    }

    pub fn vtilde(&self) -> &ComplexMatrix {
        &self.vtilde
    }

    /// The subamplitude operator itself: sqrt(sigma) V-tilde.
    pub fn w(&self) -> ComplexMatrix {
        self.sigma.sqrt() * &self.vtilde
    }

    /// True when W W^dagger = sigma within 1e-9, i.e. this is a genuine
    /// amplitude rather than a strict subamplitude.
    pub fn is_amplitude(&self) -> bool {
        let w = self.w();
        (&w * &w.dagger()).distance(self.sigma.matrix()) <= 1e-9
    }

    /// Canonical amplitude with V-tilde the support projector, W = sqrt(sigma).
    pub fn canonical(sigma: DensityMatrix) -> Self {
        let p = sigma.support_projector().clone();
        Self { sigma, vtilde: p }
    }
}

/// Two-path state stored as four blocks b_xy = <x| rho |y>.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct BlockState {
    n: usize,
    b00: ComplexMatrix,
    b01: ComplexMatrix,
    b10: ComplexMatrix,
    b11: ComplexMatrix,
}

impl BlockState {
    /// Validates the block invariants including positivity of the assembled
    /// 2N x 2N matrix (by eigenvalue check).
    pub fn new(
        b00: ComplexMatrix,
        b01: ComplexMatrix,
        b10: ComplexMatrix,
        b11: ComplexMatrix,
    ) -> StateResult<Self> {
        let n = b00.rows();
        for (name, b) in [("b00", &b00), ("b01", &b01), ("b10", &b10), ("b11", &b11)] {
            if b.shape() != (n, n) {
                return Err(StateError::DimensionMismatch(format!(
                    "block {name} has shape {:?}, expected ({n}, {n})",
                    b.shape()
                )));
            }
        }
        if b10.distance(&b01.dagger()) > 1e-10 * (1.0 + b01.frobenius_norm()) {
            return Err(StateError::NotDensity("b10 is not the adjoint of b01".into()));
        }
        let tr = b00.trace() + b11.trace();
        if (tr.re - 1.0).abs() > 1e-10 || tr.im.abs() > 1e-10 {
            return Err(StateError::NotDensity(format!("block traces sum to {tr}, not one")));
        }
        let state = Self { n, b00, b01, b10, b11 };
        let assembled = state.assemble();
        let eigen = eig_hermitian(&assembled).map_err(StateError::Linalg)?;
        if let Some(&lo) = eigen.eigenvalues.first() {
            if lo < -1e-10 {
                return Err(StateError::NotDensity(format!(
                    "assembled state has negative eigenvalue {lo:.3e}"
                )));
            }
        }
        Ok(state)
    }

    /// Construction used by `encode`, where positivity holds by the
    /// block-positivity characterization and is covered by property tests.
    pub(crate) fn from_encode_parts(
        b00: ComplexMatrix,
        b01: ComplexMatrix,
        b11: ComplexMatrix,
    ) -> Self {
        let n = b00.rows();
        let b10 = b01.dagger();
        Self { n, b00, b01, b10, b11 }
    }

    pub fn from_assembled(m: &ComplexMatrix) -> StateResult<Self> {
        if !m.is_square() || m.rows() % 2 != 0 {
            return Err(StateError::DimensionMismatch(
                "assembled state must be square with even dimension".into(),
            ));
        }
        let n = m.rows() / 2;
        Self::new(
            m.submatrix(0, 0, n, n),
            m.submatrix(0, n, n, n),
            m.submatrix(n, 0, n, n),
            m.submatrix(n, n, n, n),
        )
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn block(&self, x: usize, y: usize) -> &ComplexMatrix {
        match (x, y) {
            (0, 0) => &self.b00,
            (0, 1) => &self.b01,
            (1, 0) => &self.b10,
            (1, 1) => &self.b11,
            _ => panic!("block indices must be 0 or 1"),
        }
    }

    /// Assemble the full 2N x 2N matrix with the path index slowest.
    pub fn assemble(&self) -> ComplexMatrix {
        let n = self.n;
        let mut m = ComplexMatrix::zeros(2 * n, 2 * n);
        m.place(0, 0, &self.b00);
        m.place(0, n, &self.b01);
        m.place(n, 0, &self.b10);
        m.place(n, n, &self.b11);
        m
    }
}

/// Block encoding of a (sub)amplitude: b00 = sigma/2, b11 = 1/(2N),
/// b01 = W / (2 sqrt(N)) with W = sqrt(sigma) V-tilde.
pub fn encode(sigma: &DensityMatrix, sub: &Subamplitude) -> StateResult<BlockState> {
    if sub.sigma().dim() != sigma.dim() {
        return Err(StateError::DimensionMismatch(format!(
            "subamplitude dimension {} does not match sigma dimension {}",
            sub.sigma().dim(),
            sigma.dim()
        )));
    }
    let diff = sub.sigma().matrix().distance(sigma.matrix());
    if diff > 1e-12 * (1.0 + sigma.matrix().frobenius_norm()) {
        return Err(StateError::MarginalMismatch(diff));
    }
    let n = sigma.dim();
    let b00 = sigma.matrix().scale(0.5);
    let b11 = ComplexMatrix::identity(n).scale(0.5 / n as f64);
    let b01 = sub.w().scale(0.5 / (n as f64).sqrt());
    Ok(BlockState::from_encode_parts(b00, b01, b11))
}

/// Membership test for the prescribed-marginals class: checks the diagonal
/// blocks against sigma0/2 and sigma1/2, then recovers the canonical
/// V-tilde = 2 pinv(sqrt(sigma0)) b01 pinv(sqrt(sigma1)) and verifies that it
/// reconstructs the off-diagonal block and is a contraction.
pub fn check_membership(
    rho: &BlockState,
    sigma0: &DensityMatrix,
    sigma1: &DensityMatrix,
) -> StateResult<ComplexMatrix> {
    if rho.dim() != sigma0.dim() || rho.dim() != sigma1.dim() {
        return Err(StateError::DimensionMismatch(
            "block state and marginals must share one dimension".into(),
        ));
    }
    let half0 = sigma0.matrix().scale(0.5);
    let half1 = sigma1.matrix().scale(0.5);
    let err0 = rho.block(0, 0).distance(&half0);
    let err1 = rho.block(1, 1).distance(&half1);
    let tol = 1e-9 * (1.0 + half0.frobenius_norm().max(half1.frobenius_norm()));
    if err0 > tol || err1 > tol {
        return Err(StateError::MarginalMismatch(err0.max(err1)));
    }

    let c = rho.block(0, 1);
    let vtilde = &(&mp_pinv(sigma0.sqrt()) * c).scale(2.0) * &mp_pinv(sigma1.sqrt());

    // The recovered operator must reproduce the off-diagonal block ...
    let rebuilt = &(sigma0.sqrt() * &vtilde).scale(0.5) * sigma1.sqrt();
    let recon_err = rebuilt.distance(c);
    if recon_err > 1e-9 * (1.0 + c.frobenius_norm()) {
        return Err(StateError::NotInQ(recon_err));
    }
    // ... and be a contraction.
    let top = svd(&vtilde).map_err(StateError::Linalg)?.largest();
    if top > 1.0 + 1e-9 {
        return Err(StateError::NotInQ(top - 1.0));
    }
    Ok(vtilde)
}

/// Block-positivity test: the assembled [[A, C], [C^dagger, B]] is positive
/// semidefinite iff P_R(A) C P_R(B) = C and A >= C pinv(B) C^dagger. Both
/// conditions are checked at 1e-9; the direct eigenvalue route on the
/// assembled matrix serves as the independent oracle in tests.
pub fn block_positivity(a: &ComplexMatrix, b: &ComplexMatrix, c: &ComplexMatrix) -> bool {
    let pa = crate::linalg::range_projector(a);
    let pb = crate::linalg::range_projector(b);
    let projected = &(&pa * c) * &pb;
    let scale = 1.0 + c.frobenius_norm();
    if projected.distance(c) > 1e-9 * scale {
        return false;
    }
    let schur = a - &(&(c * &mp_pinv(b)) * &c.dagger());
    match eig_hermitian(&schur.hermitian_part()) {
        Ok(e) => e.eigenvalues.first().map_or(true, |&lo| lo >= -1e-9 * (1.0 + a.frobenius_norm())),
        Err(_) => false,
    }
}

/// Haar-distributed random unitary: QR of a complex Gaussian matrix with the
/// phase convention fixed by the R diagonal.
pub fn random_unitary(n: usize, seed: u64) -> ComplexMatrix {
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    random_unitary_with(n, &mut rng)
}

pub fn random_unitary_with<R: Rng>(n: usize, rng: &mut R) -> ComplexMatrix {
    let g = ComplexMatrix::from_fn(n, n, |_, _| {
        Complex64::new(standard_normal(rng), standard_normal(rng))
    });
    // Modified Gram-Schmidt QR. This yields the unique factorization with a
    // real positive R diagonal, which is exactly the phase convention under
    // which Q of a Ginibre matrix is Haar-distributed.
    let mut q_cols: Vec<Vec<Complex64>> = Vec::with_capacity(n);
    for j in 0..n {
        let mut col = g.column(j);
        for b in &q_cols {
            let overlap: Complex64 = b.iter().zip(col.iter()).map(|(x, y)| x.conj() * y).sum();
            for (c, x) in col.iter_mut().zip(b.iter()) {
                *c -= overlap * x;
            }
        }
        let norm: f64 = col.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        assert!(norm > 1e-12, "Ginibre matrix was numerically singular");
        for c in col.iter_mut() {
            *c /= norm;
        }
        q_cols.push(col);
    }
    ComplexMatrix::from_columns(n, &q_cols)
}

/// Reproducible random density matrix of exact rank. Kept eigenvalues are a
/// flat Dirichlet sample affinely floored at 0.01/n so no eigenvalue sits
/// near the rank threshold; eigenvectors come from a Haar unitary.
pub fn random_density(n: usize, rank: usize, seed: u64) -> StateResult<DensityMatrix> {
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    random_density_with(n, rank, &mut rng)
}

pub fn random_density_with<R: Rng>(n: usize, rank: usize, rng: &mut R) -> StateResult<DensityMatrix> {
    if rank == 0 || rank > n {
        return Err(StateError::BadRank { rank, dim: n });
    }
    // Flat Dirichlet on the rank-simplex via normalized exponentials.
    let mut weights: Vec<f64> = (0..rank).map(|_| -(1.0 - rng.gen::<f64>()).ln()).collect();
    let total: f64 = weights.iter().sum();
    for w in weights.iter_mut() {
        *w /= total;
    }
    let floor = 0.01 / n as f64;
    let shrink = 1.0 - rank as f64 * floor;
    let mut eigenvalues = vec![0.0; n];
    for (i, w) in weights.into_iter().enumerate() {
        eigenvalues[i] = shrink * w + floor;
    }
    let u = random_unitary_with(n, rng);
    let mut m = ComplexMatrix::zeros(n, n);
    for (k, &lambda) in eigenvalues.iter().enumerate() {
        if lambda == 0.0 {
            continue;
        }
        let col = u.column(k);
        for i in 0..n {
            for j in 0..n {
                m[(i, j)] += col[i] * col[j].conj() * lambda;
            }
        }
    }
    DensityMatrix::new(m.hermitian_part())
}

pub(crate) fn standard_normal<R: Rng>(rng: &mut R) -> f64 {
    // Box-Muller; one value per call keeps the stream layout simple.
    let u1: f64 = 1.0 - rng.gen::<f64>();
    let u2: f64 = rng.gen();
    (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
}
