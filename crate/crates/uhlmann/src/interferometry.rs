//! Exact density-matrix simulation of the two interferometric circuits: the
//! probe that reads the unitary part of an amplitude off the two-path state,
//! and the parallelity test that scores two encoded states by a controlled
//! application of the swap-like Z operation on the doubled space.
//!
//! Probabilities are computed exactly (no sampling); a shot-sampling wrapper
//! is available for demonstration output. Every circuit quantity has a
//! closed-form counterpart so the two routes can be checked against each
//! other.

use num_complex::Complex64;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use thiserror::Error;

use crate::linalg::{
    exp_skew, rank_tolerance, svd, zero_cutoff, ComplexMatrix, LinalgError,
};
use crate::states::{BlockState, StateError};

#[derive(Debug, Error)]
pub enum InterferometryError {
    #[error(transparent)]
    Linalg(#[from] LinalgError),

    #[error(transparent)]
    State(#[from] StateError),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("probe operator is not unitary (defect {0:.3e})")]
    NotUnitary(f64),

    #[error("off-diagonal block is numerically zero; no readout possible")]
    DegenerateReadout,

    #[error("filter removes all weight (trace {0:.3e})")]
    VanishingFilter(f64),
}

pub type InterferometryResult<T> = Result<T, InterferometryError>;

/// Result of one probe-circuit evaluation.
#[derive(Clone, Debug)]
pub struct ProbeResult {
    /// Detection probability from the simulated circuit.
    pub probability: f64,
    /// The same probability from the closed-form block expression.
    pub formula_probability: f64,
    pub trial_unitary: ComplexMatrix,
}

/// The Hermitian unitary permutation on the doubled space H (x) H whose
/// expectation value extracts Re Tr(W_b^dagger W_a) from a pair of encoded
/// states: it swaps the two tensor factors exactly when their path labels
/// differ.
#[derive(Clone, Debug)]
pub struct ZOperator {
    pub n: usize,
    pub matrix: ComplexMatrix,
}

/// Basis index on H = H_I (x) H_s with the path slowest: idx = path * n + k.
#[inline]
fn path_of(idx: usize, n: usize) -> usize {
    idx / n
}

/// The permutation representation of Z: image of each basis column index.
/// Test oracle, independent of the explicit three-term construction.
#[cfg(test)]
pub(crate) fn z_permutation(n: usize) -> Vec<usize> {
    let d = 2 * n;
    let mut perm = Vec::with_capacity(d * d);
    for a in 0..d {
        for b in 0..d {
            if path_of(a, n) == path_of(b, n) {
                perm.push(a * d + b);
            } else {
                perm.push(b * d + a);
            }
        }
    }
    perm
}

/// Build Z explicitly from its three-term definition: the two cross-path
/// swap sums plus the identity on the equal-path sectors.
pub fn build_z(n: usize) -> ZOperator {
    assert!(n >= 1);
    let d = 2 * n;
    let dd = d * d;
    let idx = |k: usize, x: usize| x * n + k;
    let mut m = ComplexMatrix::zeros(dd, dd);
    let one = Complex64::new(1.0, 0.0);
    for k in 0..n {
        for l in 0..n {
            // |chi_k,0><chi_l,1| (x) |chi_l,1><chi_k,0|
            m[(idx(k, 0) * d + idx(l, 1), idx(l, 1) * d + idx(k, 0))] = one;
            // |chi_l,1><chi_k,0| (x) |chi_k,0><chi_l,1|
            m[(idx(l, 1) * d + idx(k, 0), idx(k, 0) * d + idx(l, 1))] = one;
        }
    }
    // P0 (x) P0 and P1 (x) P1.
    for a in 0..d {
        for b in 0..d {
            if path_of(a, n) == path_of(b, n) {
                m[(a * d + b, a * d + b)] = one;
            }
        }
    }
    ZOperator { n, matrix: m }
}

/// Tr(Z (rho_b (x) rho_a)) by explicit contraction over the permutation,
/// without materializing the Kronecker product.
pub fn parallelity_e(rho_b: &BlockState, rho_a: &BlockState) -> InterferometryResult<f64> {
    if rho_b.dim() != rho_a.dim() {
        return Err(InterferometryError::DimensionMismatch(format!(
            "encoded states have dimensions {} and {}",
            rho_b.dim(),
            rho_a.dim()
        )));
    }
    let n = rho_b.dim();
    let d = 2 * n;
    let mb = rho_b.assemble();
    let ma = rho_a.assemble();
    let mut sum = Complex64::new(0.0, 0.0);
    for a in 0..d {
        for b in 0..d {
            // Tr(Z K) = sum_i K[pi(i), i] with K = rho_b (x) rho_a and
            // pi the factor swap on unequal paths.
            if path_of(a, n) == path_of(b, n) {
                sum += mb[(a, a)] * ma[(b, b)];
            } else {
                sum += mb[(b, a)] * ma[(a, b)];
            }
        }
    }
    debug_assert!(sum.im.abs() < 1e-10, "parallelity functional must be real");
    Ok(sum.re)
}

/// Detection probability of the parallelity-test circuit, simulated literally
/// on the extra qubit plus both copies of H: Hadamard, Z controlled on the
/// extra qubit, Hadamard, then projection of the extra qubit on its 0 state.
pub fn parallelity_circuit(rho_b: &BlockState, rho_a: &BlockState) -> InterferometryResult<f64> {
    if rho_b.dim() != rho_a.dim() {
        return Err(InterferometryError::DimensionMismatch(format!(
            "encoded states have dimensions {} and {}",
            rho_b.dim(),
            rho_a.dim()
        )));
    }
    let n = rho_b.dim();
    let dd = (2 * n) * (2 * n);
    let rho_pair = rho_b.assemble().kron(&rho_a.assemble());

    // |0_e><0_e| (x) rho_b (x) rho_a.
    let mut e0 = ComplexMatrix::zeros(2, 2);
    e0[(0, 0)] = Complex64::new(1.0, 0.0);
    let rho_tot = e0.kron(&rho_pair);

    // Hadamard on the extra qubit, identity elsewhere.
    let inv_sqrt2 = Complex64::new(1.0 / 2.0f64.sqrt(), 0.0);
    let mut had = ComplexMatrix::zeros(2, 2);
    had[(0, 0)] = inv_sqrt2;
    had[(0, 1)] = inv_sqrt2;
    had[(1, 0)] = inv_sqrt2;
    had[(1, 1)] = -inv_sqrt2;
    let had_e = had.kron(&ComplexMatrix::identity(dd));

    // Z on the doubled space, controlled on the extra qubit.
    let z = build_z(n);
    let mut u_z = ComplexMatrix::zeros(2 * dd, 2 * dd);
    u_z.place(0, 0, &z.matrix);
    u_z.place(dd, dd, &ComplexMatrix::identity(dd));

    let step1 = &(&had_e * &rho_tot) * &had_e;
    let step2 = &(&u_z * &step1) * &u_z.dagger();
    let fin = &(&had_e * &step2) * &had_e;

    let mut p = 0.0;
    for i in 0..dd {
        p += fin[(i, i)].re;
    }
    Ok(p)
}

/// Probe circuit: apply 1 (x) |0><0| + U (x) |1><1|, a Hadamard on the path
/// qubit, then measure the path-0 probability. Also evaluates the closed-form
/// block expression p = (Tr b00 + Tr b11)/2 + Re Tr(b01 U^dagger).
pub fn probe_probability(
    rho: &BlockState,
    u: &ComplexMatrix,
) -> InterferometryResult<ProbeResult> {
    let n = rho.dim();
    if u.shape() != (n, n) {
        return Err(InterferometryError::DimensionMismatch(format!(
            "probe unitary shape {:?} does not match dimension {n}",
            u.shape()
        )));
    }
    let defect = u.unitarity_defect();
    if defect > 1e-8 * (1.0 + (n as f64).sqrt()) {
        return Err(InterferometryError::NotUnitary(defect));
    }

    // Circuit route on the assembled 2N x 2N state.
    let assembled = rho.assemble();
    let mut u_tot = ComplexMatrix::identity(2 * n);
    u_tot.place(n, n, u);
    let id = ComplexMatrix::identity(n);
    let mut had = ComplexMatrix::zeros(2 * n, 2 * n);
    let h = 1.0 / 2.0f64.sqrt();
    had.place(0, 0, &id.scale(h));
    had.place(0, n, &id.scale(h));
    had.place(n, 0, &id.scale(h));
    had.place(n, n, &id.scale(-h));
    let evolved = &(&had * &(&(&u_tot * &assembled) * &u_tot.dagger())) * &had;
    let mut p = 0.0;
    for k in 0..n {
        p += evolved[(k, k)].re;
    }

    let diag = 0.5 * (rho.block(0, 0).trace().re + rho.block(1, 1).trace().re);
    let formula = diag + rho.block(0, 1).trace_product(&u.dagger()).re;
    Ok(ProbeResult { probability: p, formula_probability: formula, trial_unitary: u.clone() })
}

/// Exact probability reduced to a relative frequency over `shots` Bernoulli
/// trials; demonstration output only.
pub fn sampled_probability(p: f64, shots: u64, seed: u64) -> f64 {
    assert!((0.0..=1.0 + 1e-12).contains(&p), "probability out of range");
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let mut hits = 0u64;
    for _ in 0..shots {
        if rng.gen::<f64>() < p {
            hits += 1;
        }
    }
    hits as f64 / shots.max(1) as f64
}

/// The probe maximizer restricted to `support`: the canonical partial
/// isometry from the polar factors of the off-diagonal block. The returned
/// operator is verified by probing, i.e. no unitary perturbation on the
/// support may increase the detection probability.
pub fn readout_unitary(
    rho: &BlockState,
    support: &ComplexMatrix,
) -> InterferometryResult<ComplexMatrix> {
    let n = rho.dim();
    if support.shape() != (n, n) {
        return Err(InterferometryError::DimensionMismatch(
            "support projector has the wrong shape".into(),
        ));
    }
    let b01 = rho.block(0, 1);
    let f = svd(b01).map_err(InterferometryError::Linalg)?;
    if f.largest() < rank_tolerance() {
        return Err(InterferometryError::DegenerateReadout);
    }
    let cutoff = zero_cutoff(f.largest(), rank_tolerance());
    let mut maximizer = ComplexMatrix::zeros(n, n);
    let mut initial_space = ComplexMatrix::zeros(n, n);
    for (k, &s) in f.singular_values.iter().enumerate() {
        if s <= cutoff {
            continue;
        }
        let uk = f.u.column(k);
        let vk = f.v.column(k);
        for i in 0..n {
            for j in 0..n {
                maximizer[(i, j)] += uk[i] * vk[j].conj();
                initial_space[(i, j)] += vk[i] * vk[j].conj();
            }
        }
    }
    let restricted = support * &maximizer;

    // Probe verification: perturbations of the maximizer on its initial
    // space must not improve the detection probability.
    let p_star = 0.5 + b01.trace_product(&maximizer.dagger()).re;
    let mut rng = ChaCha12Rng::seed_from_u64(0x5eed_0be5);
    for _ in 0..4 {
        let raw = ComplexMatrix::from_fn(n, n, |_, _| {
            Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))
        });
        let skew = &raw - &raw.dagger();
        let skew = &(&initial_space * &skew) * &initial_space;
        let rot = exp_skew(&skew, 1e-3).map_err(InterferometryError::Linalg)?;
        let candidate = &maximizer * &rot;
        let p = 0.5 + b01.trace_product(&candidate.dagger()).re;
        assert!(
            p <= p_star + 1e-12,
            "probe maximizer was not maximal: {p} > {p_star}"
        );
    }

    Ok(restricted)
}

/// Post-selection on P in path 0: applies P (x) |0><0| + 1 (x) |1><1| and
/// renormalizes. The filtered off-diagonal block is a nonnegative multiple
/// of P b01.
pub fn filter_state(rho: &BlockState, p_proj: &ComplexMatrix) -> InterferometryResult<BlockState> {
    let n = rho.dim();
    if p_proj.shape() != (n, n) {
        return Err(InterferometryError::DimensionMismatch(
            "filter projector has the wrong shape".into(),
        ));
    }
    let b00 = &(p_proj * rho.block(0, 0)) * p_proj;
    let b01 = p_proj * rho.block(0, 1);
    let b11 = rho.block(1, 1).clone();
    let weight = b00.trace().re + b11.trace().re;
    if weight <= 1e-12 {
        return Err(InterferometryError::VanishingFilter(weight));
    }
    let scale = 1.0 / weight;
    BlockState::new(
        b00.scale(scale),
        b01.scale(scale),
        b01.scale(scale).dagger(),
        b11.scale(scale),
    )
    .map_err(InterferometryError::State)
}
