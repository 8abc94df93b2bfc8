//! End-to-end holonomy of a density-operator sequence, computed two ways.
//!
//! The analytic route multiplies the relative polar factors of adjacent
//! square roots. The operational route runs the iterative transport loop on
//! encoded two-path states: at each step the preparation of the next state is
//! varied until the interferometric parallelity functional is maximal, the
//! maximizer is projected onto the range of the adjacent square-root product,
//! and after the final step the holonomy is extracted by unmodulating the
//! initial amplitude, post-selecting on the final support, and reading the
//! probe maximizer off the off-diagonal block.

use serde::Serialize;
use thiserror::Error;

use crate::interferometry::{
    filter_state, parallelity_e, readout_unitary, InterferometryError,
};
use crate::linalg::{
    complete_to_unitary, projectors_equal, range_projector, sqrt_psd, svd, zero_cutoff,
    ComplexMatrix, LinalgError,
};
use crate::optimizer::{
    ascend_with_objective, clip_contraction, maximize_closed, AscentOptions, Domain, Maximization,
    OptimizerError,
};
use crate::states::{
    encode, random_unitary, BlockState, DensityMatrix, StateError, Subamplitude,
};

#[derive(Debug, Error)]
pub enum TransportError {
    #[error(transparent)]
    Linalg(#[from] LinalgError),

    #[error(transparent)]
    State(#[from] StateError),

    #[error(transparent)]
    Interferometry(#[from] InterferometryError),

    #[error(transparent)]
    Optimizer(#[from] OptimizerError),

    #[error("sequence is not admissible (first failing adjacent triple at index {index})")]
    NotAdmissible { index: usize },

    #[error("initial operator is not an amplitude of the first state: {0}")]
    BadInitialAmplitude(String),

    #[error("sequence needs at least two states, got {0}")]
    TooShort(usize),
}

pub type TransportResult<T> = Result<T, TransportError>;

/// An ordered sequence of density operators on one space.
#[derive(Clone, Debug)]
pub struct SequenceSpec {
    n: usize,
    sigmas: Vec<DensityMatrix>,
    labels: Option<Vec<String>>,
}

impl SequenceSpec {
    pub fn new(sigmas: Vec<DensityMatrix>, labels: Option<Vec<String>>) -> TransportResult<Self> {
        if sigmas.len() < 2 {
            return Err(TransportError::TooShort(sigmas.len()));
        }
        let n = sigmas[0].dim();
        if sigmas.iter().any(|s| s.dim() != n) {
            return Err(TransportError::State(StateError::DimensionMismatch(
                "all states in a sequence must share one dimension".into(),
            )));
        }
        if let Some(l) = &labels {
            if l.len() != sigmas.len() {
                return Err(TransportError::State(StateError::DimensionMismatch(
                    "label count must match state count".into(),
                )));
            }
        }
        Ok(Self { n, sigmas, labels })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn len(&self) -> usize {
        self.sigmas.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn states(&self) -> &[DensityMatrix] {
        &self.sigmas
    }

    pub fn labels(&self) -> Option<&[String]> {
        self.labels.as_deref()
    }

    /// All states full rank.
    pub fn is_faithful(&self) -> bool {
        self.sigmas.iter().all(|s| s.is_faithful())
    }
}

/// Which route produced a holonomy.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    Analytic,
    OperationalClosed,
    OperationalAscent,
}

/// Per-step log of the transport loop.
#[derive(Clone, Debug, Serialize)]
pub struct TransportRecord {
    /// Step index k, describing the move from state k to k+1 (1-based).
    pub step: usize,
    /// The projected maximizer V-tilde_{k+1}.
    pub vtilde: ComplexMatrix,
    /// The parallelity functional achieved on the encoded pair.
    pub objective: f64,
    /// Projector onto R(sqrt(sigma_{k+1}) sqrt(sigma_k)).
    pub projector: ComplexMatrix,
    /// Optimizer (iteration, objective) trace when the step was iterative.
    pub optimizer_trace: Vec<(usize, f64)>,
}

#[derive(Clone, Debug, Serialize)]
pub struct HolonomyResult {
    /// The holonomy: unitary for faithful sequences, otherwise the partial
    /// isometry supported on `final_support`.
    pub u_uhl: ComplexMatrix,
    pub method: Method,
    pub records: Vec<TransportRecord>,
    /// The initial amplitude choice V-tilde_1.
    pub initial_v: ComplexMatrix,
    /// Projector onto R(sqrt(sigma_K) sqrt(sigma_{K-1})), the final space of
    /// the holonomy.
    pub final_support: ComplexMatrix,
    /// Non-canonical unitary extension of `u_uhl`, attached for unfaithful
    /// sequences where the holonomy itself is only a partial isometry.
    pub unitary_completion: Option<ComplexMatrix>,
}

/// The relative polar factor of the pair: the unique partial isometry U with
/// sqrt(sigma_next) sqrt(sigma_prev) = sqrt(sqrt(sigma_next) sigma_prev
/// sqrt(sigma_next)) U, initial space R(sqrt(sigma_prev) sqrt(sigma_next))
/// and final space R(sqrt(sigma_next) sqrt(sigma_prev)). Computed from the
/// SVD of the square-root product; zero overlap yields the zero matrix.
pub fn relative_polar(sigma_next: &DensityMatrix, sigma_prev: &DensityMatrix) -> ComplexMatrix {
    assert_eq!(sigma_next.dim(), sigma_prev.dim(), "relative_polar dimension mismatch");
    let m = sigma_next.sqrt() * sigma_prev.sqrt();
    let f = svd(&m).expect("SVD failed to converge");
    let cutoff = zero_cutoff(f.largest(), crate::linalg::rank_tolerance());
    let n = m.rows();
    let mut out = ComplexMatrix::zeros(n, n);
    for (k, &s) in f.singular_values.iter().enumerate() {
        if s <= cutoff {
            continue;
        }
        let u = f.u.column(k);
        let v = f.v.column(k);
        for i in 0..n {
            for j in 0..n {
                out[(i, j)] += u[i] * v[j].conj();
            }
        }
    }
    out
}

/// Admissibility: for every interior state the overlap ranges looking
/// backward and forward must agree,
/// R(sqrt(sigma_{k+1}) sqrt(sigma_k)) = R(sqrt(sigma_{k+1}) sqrt(sigma_{k+2})).
/// Returns the first failing triple index (0-based k) if any.
pub fn is_admissible(seq: &SequenceSpec) -> (bool, Option<usize>) {
    let sigmas = seq.states();
    for k in 0..sigmas.len().saturating_sub(2) {
        let back = range_projector(&(sigmas[k + 1].sqrt() * sigmas[k].sqrt()));
        let forward = range_projector(&(sigmas[k + 1].sqrt() * sigmas[k + 2].sqrt()));
        // A zero overlap range collapses the factor chain; both ranges being
        // empty still does not make a usable match.
        if back.trace().re < 0.5 || forward.trace().re < 0.5 {
            return (false, Some(k));
        }
        if !projectors_equal(&back, &forward) {
            return (false, Some(k));
        }
    }
    (true, None)
}

fn require_admissible(seq: &SequenceSpec) -> TransportResult<()> {
    match is_admissible(seq) {
        (true, _) => Ok(()),
        (false, idx) => Err(TransportError::NotAdmissible { index: idx.unwrap_or(0) }),
    }
}

fn final_support(seq: &SequenceSpec) -> ComplexMatrix {
    let k = seq.len();
    range_projector(&(seq.states()[k - 1].sqrt() * seq.states()[k - 2].sqrt()))
}

/// Theoretical per-step maximum of the parallelity functional for the pair:
/// E = 1/2 + Tr sqrt(sqrt(b) a sqrt(b)) / (2N).
fn step_objective_bound(next: &DensityMatrix, prev: &DensityMatrix) -> f64 {
    0.5 + fidelity(next, prev) / (2.0 * next.dim() as f64)
}

/// Closed-form holonomy: the ordered product of relative polar factors,
/// latest factor leftmost. Also logs the iterated amplitudes
/// V-tilde_{k+1} = U_{k+1,k} V-tilde_k starting from the support projector of
/// the first state, so the product and transported definitions can be
/// compared.
pub fn analytic_holonomy(seq: &SequenceSpec) -> TransportResult<HolonomyResult> {
    require_admissible(seq)?;
    let sigmas = seq.states();
    let initial_v = sigmas[0].support_projector().clone();

    let mut u = ComplexMatrix::identity(seq.dim());
    let mut vtilde = initial_v.clone();
    let mut records = Vec::with_capacity(seq.len() - 1);
    for k in 0..seq.len() - 1 {
        let factor = relative_polar(&sigmas[k + 1], &sigmas[k]);
        u = &factor * &u;
        vtilde = &factor * &vtilde;
        records.push(TransportRecord {
            step: k + 1,
            vtilde: vtilde.clone(),
            objective: step_objective_bound(&sigmas[k + 1], &sigmas[k]),
            projector: range_projector(&(sigmas[k + 1].sqrt() * sigmas[k].sqrt())),
            optimizer_trace: Vec::new(),
        });
    }

    let support = final_support(seq);
    let unitary_completion = if seq.is_faithful() {
        assert!(
            u.unitarity_defect() < 1e-8,
            "holonomy of a faithful sequence must be unitary"
        );
        None
    } else {
        Some(complete_to_unitary(&u)?)
    };
    Ok(HolonomyResult {
        u_uhl: u,
        method: Method::Analytic,
        records,
        initial_v,
        final_support: support,
        unitary_completion,
    })
}

/// Default initial amplitude: V-tilde_1 equal to the support projector of the
/// first state (the identity when it is faithful).
pub fn default_initial_amplitude(seq: &SequenceSpec) -> ComplexMatrix {
    seq.states()[0].support_projector().clone()
}

/// Random admissible initial amplitude: the support projector composed with a
/// Haar unitary, so V-tilde_1 V-tilde_1^dagger is still the support.
pub fn random_initial_amplitude(seq: &SequenceSpec, seed: u64) -> ComplexMatrix {
    seq.states()[0].support_projector() * &random_unitary(seq.dim(), seed)
}

/// Operational holonomy via the iterative transport loop.
///
/// `initial_v` must satisfy V-tilde_1 V-tilde_1^dagger = P_R(sigma_1), i.e.
/// sqrt(sigma_1) V-tilde_1 is an amplitude, not a subamplitude. With
/// `Maximization::Ascent` the per-step search climbs the measured
/// parallelity functional of encoded states; with `Maximization::Closed` it
/// uses the polar-factor maximizer directly, and the functional is still
/// evaluated interferometrically for the record.
pub fn operational_holonomy(
    seq: &SequenceSpec,
    initial_v: &ComplexMatrix,
    method: Maximization,
) -> TransportResult<HolonomyResult> {
    require_admissible(seq)?;
    let sigmas = seq.states();
    let n = seq.dim();
    if initial_v.shape() != (n, n) {
        return Err(TransportError::BadInitialAmplitude("wrong shape".into()));
    }
    let gram = initial_v * &initial_v.dagger();
    let support0 = sigmas[0].support_projector();
    if gram.distance(support0) > 1e-8 * (1.0 + support0.frobenius_norm()) {
        return Err(TransportError::BadInitialAmplitude(format!(
            "V V^dagger differs from the support projector by {:.3e}",
            gram.distance(support0)
        )));
    }

    let mut vtilde = initial_v.clone();
    let mut records = Vec::with_capacity(seq.len() - 1);
    for k in 0..seq.len() - 1 {
        let (sigma_k, sigma_next) = (&sigmas[k], &sigmas[k + 1]);
        let rho_k = encode(sigma_k, &Subamplitude::new(sigma_k.clone(), vtilde.clone())?)?;
        let objective_matrix = &(sigma_next.sqrt() * sigma_k.sqrt()) * &vtilde;

        let (maximizer, trace) = match method {
            Maximization::Closed => {
                (maximize_closed(&objective_matrix, Domain::Contraction).vstar, Vec::new())
            }
            Maximization::Ascent => {
                // Vary the preparation of the next encoded state, scoring
                // each candidate by the measured functional. Tight gain
                // tolerance: iterate error enters the holonomy once per step.
                let opts = AscentOptions { tol: 1e-14, ..AscentOptions::default() };
                let result = ascend_with_objective(
                    &objective_matrix,
                    Domain::Contraction,
                    &vtilde,
                    opts,
                    |v| {
                        let sub = Subamplitude::new(sigma_next.clone(), clip_contraction(v))
                            .expect("clipped iterate is a contraction");
                        let rho = encode(sigma_next, &sub).expect("iterate encodes");
                        let e = parallelity_e(&rho, &rho_k).expect("dimensions agree");
                        (e - 0.5) * 2.0 * n as f64
                    },
                )?;
                (result.vstar, result.trace)
            }
        };

        let projector = range_projector(&(sigma_next.sqrt() * sigma_k.sqrt()));
        vtilde = &projector * &maximizer;

        // Score the accepted, projected preparation interferometrically.
        let rho_next = encode(sigma_next, &Subamplitude::new(sigma_next.clone(), vtilde.clone())?)?;
        let objective = parallelity_e(&rho_next, &rho_k)?;
        records.push(TransportRecord {
            step: k + 1,
            vtilde: vtilde.clone(),
            objective,
            projector,
            optimizer_trace: trace,
        });
    }

    // Extraction: unmodulate the initial amplitude, post-select on the final
    // support, and read out the probe maximizer.
    let sigma_last = &sigmas[seq.len() - 1];
    let rho_last = encode(sigma_last, &Subamplitude::new(sigma_last.clone(), vtilde.clone())?)?;
    let v1_bar = complete_to_unitary(initial_v)?;
    let b01 = rho_last.block(0, 1) * &v1_bar.dagger();
    let modulated = BlockState::new(
        rho_last.block(0, 0).clone(),
        b01.clone(),
        b01.dagger(),
        rho_last.block(1, 1).clone(),
    )?;

    let support = final_support(seq);
    let filtered = filter_state(&modulated, &support)?;
    let u = readout_unitary(&filtered, &support)?;

    let unitary_completion = if seq.is_faithful() {
        assert!(
            u.unitarity_defect() < 1e-8,
            "holonomy of a faithful sequence must be unitary"
        );
        None
    } else {
        Some(complete_to_unitary(&u)?)
    };
    Ok(HolonomyResult {
        u_uhl: u,
        method: match method {
            Maximization::Closed => Method::OperationalClosed,
            Maximization::Ascent => Method::OperationalAscent,
        },
        records,
        initial_v: initial_v.clone(),
        final_support: support,
        unitary_completion,
    })
}

/// Quantum fidelity F = Tr sqrt(sqrt(b) a sqrt(b)).
pub fn fidelity(a: &DensityMatrix, b: &DensityMatrix) -> f64 {
    assert_eq!(a.dim(), b.dim(), "fidelity dimension mismatch");
    let inner = &(b.sqrt() * a.matrix()) * b.sqrt();
    sqrt_psd(&inner.hermitian_part())
        .expect("fidelity operand is PSD by construction")
        .trace()
        .re
}

/// Bures distance in the printed convention d = sqrt(2 - 2 F^2).
///
/// Note: the more common convention is sqrt(2 - 2F); this crate follows the
/// squared form used alongside the transport construction.
pub fn bures_distance(a: &DensityMatrix, b: &DensityMatrix) -> f64 {
    let f = fidelity(a, b);
    (2.0 - 2.0 * f * f).max(0.0).sqrt()
}

/// Sample a smooth path of density operators at `samples` equally spaced
/// parameters in [0, 1] to form a discrete sequence.
pub fn sample_path<F>(path: F, samples: usize) -> TransportResult<SequenceSpec>
where
    F: Fn(f64) -> StateError2,
{
    let mut sigmas = Vec::with_capacity(samples);
    let mut labels = Vec::with_capacity(samples);
    for i in 0..samples {
        let t = if samples > 1 { i as f64 / (samples - 1) as f64 } else { 0.0 };
        sigmas.push(path(t)?);
        labels.push(format!("t={t:.6}"));
    }
    SequenceSpec::new(sigmas, Some(labels))
}

type StateError2 = Result<DensityMatrix, StateError>;

/// Seeded sequence of random faithful states.
pub fn random_faithful_sequence(n: usize, k: usize, seed: u64) -> TransportResult<SequenceSpec> {
    use rand::SeedableRng;
    let mut rng = rand_chacha::ChaCha12Rng::seed_from_u64(seed);
    let sigmas: Result<Vec<_>, _> =
        (0..k).map(|_| crate::states::random_density_with(n, n, &mut rng)).collect();
    SequenceSpec::new(sigmas?, None)
}

/// Seeded sequence of rank-deficient states sharing one support subspace.
/// Full rank on the common support makes every adjacent overlap range equal
/// to the support, so the sequence is admissible by construction.
pub fn random_equal_support_sequence(
    n: usize,
    rank: usize,
    k: usize,
    seed: u64,
) -> TransportResult<SequenceSpec> {
    use rand::SeedableRng;
    let mut rng = rand_chacha::ChaCha12Rng::seed_from_u64(seed);
    let basis = crate::states::random_unitary_with(n, &mut rng);
    let iso =
        ComplexMatrix::from_columns(n, &(0..rank).map(|j| basis.column(j)).collect::<Vec<_>>());
    let mut sigmas = Vec::with_capacity(k);
    for _ in 0..k {
        let small = crate::states::random_density_with(rank, rank, &mut rng)?;
        let embedded = &(&iso * small.matrix()) * &iso.dagger();
        sigmas.push(DensityMatrix::new(embedded.hermitian_part())?);
    }
    SequenceSpec::new(sigmas, None)
}

/// Seeded sequence of pure states with adjacent overlaps of modulus at least
/// 0.05 (candidates below that are redrawn), so the sequence is admissible.
pub fn random_pure_sequence(n: usize, k: usize, seed: u64) -> TransportResult<SequenceSpec> {
    use rand::Rng;
    use rand::SeedableRng;
    use num_complex::Complex64;
    let mut rng = rand_chacha::ChaCha12Rng::seed_from_u64(seed);
    let mut vectors: Vec<Vec<Complex64>> = Vec::new();
    while vectors.len() < k {
        let mut v: Vec<Complex64> = (0..n)
            .map(|_| Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
            .collect();
        let norm: f64 = v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        if norm < 1e-6 {
            continue;
        }
        v.iter_mut().for_each(|z| *z /= norm);
        if let Some(prev) = vectors.last() {
            let overlap: Complex64 = prev.iter().zip(v.iter()).map(|(a, b)| a.conj() * b).sum();
            if overlap.norm() < 0.05 {
                continue;
            }
        }
        vectors.push(v);
    }
    let sigmas: Result<Vec<_>, _> = vectors.iter().map(|v| DensityMatrix::pure(v)).collect();
    SequenceSpec::new(sigmas?, None)
}

/// Seeded discretization of a smooth faithful path: a rotating frame applied
/// to a sliding mixture of two random faithful endpoints.
pub fn random_path_sequence(n: usize, samples: usize, seed: u64) -> TransportResult<SequenceSpec> {
    use rand::Rng;
    use rand::SeedableRng;
    use num_complex::Complex64;
    let mut rng = rand_chacha::ChaCha12Rng::seed_from_u64(seed);
    let start = crate::states::random_density_with(n, n, &mut rng)?;
    let end = crate::states::random_density_with(n, n, &mut rng)?;
    let raw = ComplexMatrix::from_fn(n, n, |_, _| {
        Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))
    });
    let generator = &(&raw - &raw.dagger()).scale(0.5);
    sample_path(
        |t| {
            let frame = crate::linalg::exp_skew(generator, t).expect("generator is skew");
            let blend = &start.matrix().scale(1.0 - t) + &end.matrix().scale(t);
            DensityMatrix::new((&(&frame * &blend) * &frame.dagger()).hermitian_part())
        },
        samples,
    )
}

/// One property check inside a verification report.
#[derive(Clone, Debug, Serialize)]
pub struct PropertyCheck {
    pub name: String,
    pub passed: bool,
    pub error: f64,
    pub tolerance: f64,
}

impl PropertyCheck {
    fn measure(name: &str, error: f64, tolerance: f64) -> Self {
        Self { name: name.into(), passed: error <= tolerance, error, tolerance }
    }

    fn failed(name: &str, detail: f64) -> Self {
        Self { name: name.into(), passed: false, error: detail, tolerance: 0.0 }
    }
}

/// Diagnostics from running both routes on one sequence.
#[derive(Clone, Debug, Serialize)]
pub struct VerifyReport {
    pub n: usize,
    pub k: usize,
    pub faithful: bool,
    pub admissible: bool,
    pub failing_index: Option<usize>,
    pub discrepancy: Option<f64>,
    pub checks: Vec<PropertyCheck>,
}

impl VerifyReport {
    pub fn all_passed(&self) -> bool {
        self.admissible && self.checks.iter().all(|c| c.passed)
    }
}

/// Run the analytic and operational routes and collect the invariant suite:
/// route discrepancy, gauge invariance over random initial amplitudes,
/// per-step objective against fidelity, the projected-maximizer identity,
/// and parallelity positivity for faithful sequences.
pub fn verify(seq: &SequenceSpec, method: Maximization, trials: usize, seed: u64) -> VerifyReport {
    let (admissible, failing_index) = is_admissible(seq);
    let mut report = VerifyReport {
        n: seq.dim(),
        k: seq.len(),
        faithful: seq.is_faithful(),
        admissible,
        failing_index,
        discrepancy: None,
        checks: Vec::new(),
    };
    if !admissible {
        return report;
    }

    let route_tol = match method {
        Maximization::Closed => 1e-6,
        Maximization::Ascent => 1e-5,
    };

    let analytic = match analytic_holonomy(seq) {
        Ok(r) => r,
        Err(e) => {
            report.checks.push(PropertyCheck::failed(&format!("analytic route ({e})"), f64::NAN));
            return report;
        }
    };
    let initial = default_initial_amplitude(seq);
    let operational = match operational_holonomy(seq, &initial, method) {
        Ok(r) => r,
        Err(e) => {
            report
                .checks
                .push(PropertyCheck::failed(&format!("operational route ({e})"), f64::NAN));
            return report;
        }
    };

    let discrepancy = operational.u_uhl.distance(&analytic.u_uhl);
    report.discrepancy = Some(discrepancy);
    report.checks.push(PropertyCheck::measure(
        "operational vs analytic holonomy",
        discrepancy,
        route_tol,
    ));

    // Gauge invariance over random initial amplitudes.
    let mut gauge_err = 0.0f64;
    for t in 0..trials {
        let init = random_initial_amplitude(seq, seed.wrapping_add(t as u64));
        match operational_holonomy(seq, &init, method) {
            Ok(r) => gauge_err = gauge_err.max(r.u_uhl.distance(&operational.u_uhl)),
            Err(e) => {
                report.checks.push(PropertyCheck::failed(&format!("gauge trial {t} ({e})"), f64::NAN));
            }
        }
    }
    if trials > 0 {
        report.checks.push(PropertyCheck::measure(
            "gauge invariance of the holonomy",
            gauge_err,
            route_tol,
        ));
    }

    // Per-step achieved objective against the fidelity bound.
    let sigmas = seq.states();
    let mut objective_err = 0.0f64;
    for (k, rec) in operational.records.iter().enumerate() {
        let bound = step_objective_bound(&sigmas[k + 1], &sigmas[k]);
        objective_err = objective_err.max((rec.objective - bound).abs());
    }
    report.checks.push(PropertyCheck::measure(
        "per-step objective equals the fidelity bound",
        objective_err,
        1e-8,
    ));

    // Projected maximizer identity: V V^dagger equals the step projector.
    let mut projector_err = 0.0f64;
    for rec in &operational.records {
        let gram = &rec.vtilde * &rec.vtilde.dagger();
        projector_err = projector_err.max(gram.distance(&rec.projector));
    }
    report.checks.push(PropertyCheck::measure(
        "projected maximizer spans the step range",
        projector_err,
        1e-8,
    ));

    // Parallelity positivity along the accepted chain (faithful case).
    if seq.is_faithful() {
        let mut positivity_err = 0.0f64;
        let mut prev_v = operational.initial_v.clone();
        for (k, rec) in operational.records.iter().enumerate() {
            let w_prev = sigmas[k].sqrt() * &prev_v;
            let w_next = sigmas[k + 1].sqrt() * &rec.vtilde;
            let overlap = &w_next.dagger() * &w_prev;
            positivity_err = positivity_err.max(overlap.hermitian_defect());
            if let Ok(eigen) = crate::linalg::eig_hermitian(&overlap.hermitian_part()) {
                positivity_err = positivity_err.max((-eigen.eigenvalues[0]).max(0.0));
            }
            prev_v = rec.vtilde.clone();
        }
        report.checks.push(PropertyCheck::measure(
            "parallelity positivity of adjacent amplitudes",
            positivity_err,
            1e-8,
        ));
    }

    report
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::states::random_density;
    use num_complex::Complex64;

    fn faithful_sequence(n: usize, k: usize, seed: u64) -> SequenceSpec {
        random_faithful_sequence(n, k, seed).unwrap()
    }

    fn equal_support_sequence(n: usize, rank: usize, k: usize, seed: u64) -> SequenceSpec {
        random_equal_support_sequence(n, rank, k, seed).unwrap()
    }

    /// Pure-state sequence plus the top eigenvector of each state, for the
    /// overlap-product oracle.
    fn pure_sequence(n: usize, k: usize, seed: u64) -> (SequenceSpec, Vec<Vec<Complex64>>) {
        let seq = random_pure_sequence(n, k, seed).unwrap();
        let vectors = seq
            .states()
            .iter()
            .map(|s| s.eigenvectors().column(n - 1))
            .collect();
        (seq, vectors)
    }

    #[test]
    fn relative_polar_of_identical_faithful_state() {
        let sigma = random_density(3, 3, 1).unwrap();
        let u = relative_polar(&sigma, &sigma);
        assert!(u.approx_eq(&ComplexMatrix::identity(3), 1e-9));
    }

    #[test]
    fn relative_polar_of_commuting_pair() {
        let a = DensityMatrix::new(ComplexMatrix::real_diagonal(&[0.5, 0.3, 0.2])).unwrap();
        let b = DensityMatrix::new(ComplexMatrix::real_diagonal(&[0.2, 0.3, 0.5])).unwrap();
        let u = relative_polar(&a, &b);
        assert!(u.approx_eq(&ComplexMatrix::identity(3), 1e-9));
    }

    #[test]
    fn relative_polar_of_pure_pair() {
        // |psi1> = |0>, |psi2> = (|0> + |1>)/sqrt(2): the factor is
        // |psi2><psi1|, first column (1, 1)/sqrt(2), second zero.
        let s = 1.0 / 2.0f64.sqrt();
        let psi1 = DensityMatrix::pure(&[Complex64::new(1.0, 0.0), Complex64::new(0.0, 0.0)]).unwrap();
        let psi2 =
            DensityMatrix::pure(&[Complex64::new(s, 0.0), Complex64::new(s, 0.0)]).unwrap();
        let u = relative_polar(&psi2, &psi1);
        let expect = ComplexMatrix::from_real_rows(&[&[s, 0.0], &[s, 0.0]]);
        assert!(u.approx_eq(&expect, 1e-10), "got {u:?}");
    }

    #[test]
    fn relative_polar_matches_literal_formula() {
        // Independent route: pinv(sqrt(sqrt(b) a sqrt(b))) sqrt(b) sqrt(a).
        for seed in 0..3u64 {
            let a = random_density(3, 3, 10 + seed).unwrap();
            let b = random_density(3, 3, 20 + seed).unwrap();
            let fast = relative_polar(&b, &a);
            let m = b.sqrt() * a.sqrt();
            let inner = &(b.sqrt() * a.matrix()) * b.sqrt();
            let root = crate::linalg::sqrt_psd(&inner.hermitian_part()).unwrap();
            let slow = &crate::linalg::mp_pinv(&root) * &m;
            assert!(fast.distance(&slow) < 1e-8, "routes differ at seed {seed}");
        }
    }

    #[test]
    fn admissibility_of_basic_sequences() {
        let seq = faithful_sequence(3, 4, 30);
        assert_eq!(is_admissible(&seq), (true, None));

        let seq = equal_support_sequence(4, 2, 4, 40);
        assert_eq!(is_admissible(&seq), (true, None));

        // Pure sequence with an orthogonal adjacent pair is inadmissible.
        let e0 = DensityMatrix::pure(&[Complex64::new(1.0, 0.0), Complex64::new(0.0, 0.0)]).unwrap();
        let e1 = DensityMatrix::pure(&[Complex64::new(0.0, 0.0), Complex64::new(1.0, 0.0)]).unwrap();
        let plus = DensityMatrix::pure(&[
            Complex64::new(1.0 / 2.0f64.sqrt(), 0.0),
            Complex64::new(1.0 / 2.0f64.sqrt(), 0.0),
        ])
        .unwrap();
        let seq = SequenceSpec::new(vec![e0, e1, plus], None).unwrap();
        let (ok, idx) = is_admissible(&seq);
        assert!(!ok);
        assert_eq!(idx, Some(0));
    }

    #[test]
    fn analytic_constant_sequence_is_identity() {
        let sigma = random_density(3, 3, 50).unwrap();
        let seq = SequenceSpec::new(vec![sigma.clone(), sigma.clone(), sigma], None).unwrap();
        let h = analytic_holonomy(&seq).unwrap();
        assert!(h.u_uhl.distance(&ComplexMatrix::identity(3)) < 1e-8);
    }

    #[test]
    fn analytic_commuting_sequence_is_identity() {
        let diags = [
            [0.5, 0.3, 0.2],
            [0.1, 0.6, 0.3],
            [0.4, 0.4, 0.2],
            [0.2, 0.5, 0.3],
        ];
        let sigmas: Vec<DensityMatrix> = diags
            .iter()
            .map(|d| DensityMatrix::new(ComplexMatrix::real_diagonal(d)).unwrap())
            .collect();
        let seq = SequenceSpec::new(sigmas, None).unwrap();
        let h = analytic_holonomy(&seq).unwrap();
        assert!(h.u_uhl.distance(&ComplexMatrix::identity(3)) < 1e-8);
    }

    #[test]
    fn analytic_pure_sequence_reproduces_pancharatnam() {
        let (seq, vectors) = pure_sequence(3, 5, 60);
        let h = analytic_holonomy(&seq).unwrap();
        // Independent oracle: product of normalized successive overlaps.
        let mut phase = Complex64::new(1.0, 0.0);
        for w in vectors.windows(2) {
            let overlap: Complex64 =
                w[1].iter().zip(w[0].iter()).map(|(a, b)| a.conj() * b).sum();
            phase *= overlap / overlap.norm();
        }
        let first = &vectors[0];
        let last = &vectors[vectors.len() - 1];
        let expect = ComplexMatrix::from_fn(3, 3, |i, j| phase * last[i] * first[j].conj());
        assert!(
            h.u_uhl.distance(&expect) < 1e-8,
            "holonomy must be the Pancharatnam dyad, err {}",
            h.u_uhl.distance(&expect)
        );
    }

    #[test]
    fn analytic_composition_identity() {
        // V_K V_1^dagger from the iterated records equals the factor product.
        let seq = faithful_sequence(3, 5, 70);
        let h = analytic_holonomy(&seq).unwrap();
        let v_last = &h.records.last().unwrap().vtilde;
        let rebuilt = v_last * &h.initial_v.dagger();
        assert!(rebuilt.distance(&h.u_uhl) < 1e-9);
    }

    #[test]
    fn operational_constant_pair_is_identity() {
        let sigma = random_density(2, 2, 80).unwrap();
        let seq = SequenceSpec::new(vec![sigma.clone(), sigma], None).unwrap();
        let init = default_initial_amplitude(&seq);
        let h = operational_holonomy(&seq, &init, Maximization::Closed).unwrap();
        assert!(h.u_uhl.distance(&ComplexMatrix::identity(2)) < 1e-8);
    }

    #[test]
    fn operational_matches_analytic_faithful() {
        for seed in 0..3u64 {
            let seq = faithful_sequence(3, 5, 90 + 10 * seed);
            let oracle = analytic_holonomy(&seq).unwrap();
            let init = default_initial_amplitude(&seq);
            let h = operational_holonomy(&seq, &init, Maximization::Closed).unwrap();
            assert!(
                h.u_uhl.distance(&oracle.u_uhl) < 1e-6,
                "closed route differs by {}",
                h.u_uhl.distance(&oracle.u_uhl)
            );
        }
    }

    #[test]
    fn operational_ascent_matches_analytic() {
        let seq = faithful_sequence(2, 4, 130);
        let oracle = analytic_holonomy(&seq).unwrap();
        let init = default_initial_amplitude(&seq);
        let h = operational_holonomy(&seq, &init, Maximization::Ascent).unwrap();
        assert!(
            h.u_uhl.distance(&oracle.u_uhl) < 1e-5,
            "ascent route differs by {}",
            h.u_uhl.distance(&oracle.u_uhl)
        );
        assert!(h.records.iter().all(|r| !r.optimizer_trace.is_empty()));
    }

    #[test]
    fn operational_gauge_invariance() {
        let seq = faithful_sequence(3, 4, 140);
        let base =
            operational_holonomy(&seq, &default_initial_amplitude(&seq), Maximization::Closed)
                .unwrap();
        for t in 0..3u64 {
            let init = random_initial_amplitude(&seq, 1000 + t);
            let h = operational_holonomy(&seq, &init, Maximization::Closed).unwrap();
            assert!(
                h.u_uhl.distance(&base.u_uhl) < 1e-6,
                "holonomy must not depend on the initial amplitude"
            );
        }
    }

    #[test]
    fn operational_unfaithful_equal_support() {
        let seq = equal_support_sequence(4, 2, 4, 150);
        let oracle = analytic_holonomy(&seq).unwrap();
        let init = default_initial_amplitude(&seq);
        let h = operational_holonomy(&seq, &init, Maximization::Closed).unwrap();
        assert!(h.u_uhl.distance(&oracle.u_uhl) < 1e-6);
        // Per-step projected maximizer identity.
        for rec in &h.records {
            let gram = &rec.vtilde * &rec.vtilde.dagger();
            assert!(gram.distance(&rec.projector) < 1e-8);
        }
        // The holonomy is a partial isometry with the final support.
        assert!(crate::linalg::is_partial_isometry(&h.u_uhl));
        let out_space = &h.u_uhl * &h.u_uhl.dagger();
        assert!(projectors_equal(&out_space, &h.final_support));
        assert!(h.unitary_completion.is_some());
    }

    #[test]
    fn operational_rejects_bad_initial() {
        let seq = faithful_sequence(2, 3, 160);
        let bad = ComplexMatrix::identity(2).scale(0.5);
        assert!(matches!(
            operational_holonomy(&seq, &bad, Maximization::Closed),
            Err(TransportError::BadInitialAmplitude(_))
        ));
    }

    #[test]
    fn inadmissible_sequence_is_rejected() {
        let e0 = DensityMatrix::pure(&[Complex64::new(1.0, 0.0), Complex64::new(0.0, 0.0)]).unwrap();
        let e1 = DensityMatrix::pure(&[Complex64::new(0.0, 0.0), Complex64::new(1.0, 0.0)]).unwrap();
        let seq = SequenceSpec::new(vec![e0.clone(), e1, e0], None).unwrap();
        assert!(matches!(
            analytic_holonomy(&seq),
            Err(TransportError::NotAdmissible { .. })
        ));
    }

    #[test]
    fn fidelity_examples() {
        let sigma = random_density(3, 3, 170).unwrap();
        assert!((fidelity(&sigma, &sigma) - 1.0).abs() < 1e-9);

        let e0 = DensityMatrix::pure(&[Complex64::new(1.0, 0.0), Complex64::new(0.0, 0.0)]).unwrap();
        let e1 = DensityMatrix::pure(&[Complex64::new(0.0, 0.0), Complex64::new(1.0, 0.0)]).unwrap();
        assert!(fidelity(&e0, &e1).abs() < 1e-9);
        assert!((bures_distance(&e0, &e1) - 2.0f64.sqrt()).abs() < 1e-9);

        // F(1/2, |0><0|) = 1/sqrt(2), worked by hand.
        let mixed = DensityMatrix::maximally_mixed(2);
        let f = fidelity(&mixed, &e0);
        assert!((f - 1.0 / 2.0f64.sqrt()).abs() < 1e-9, "got {f}");
    }

    #[test]
    fn fidelity_is_symmetric() {
        let a = random_density(3, 3, 180).unwrap();
        let b = random_density(3, 2, 181).unwrap();
        assert!((fidelity(&a, &b) - fidelity(&b, &a)).abs() < 1e-9);
    }

    #[test]
    fn verify_reports_all_green_on_faithful_sequence() {
        let seq = faithful_sequence(2, 4, 190);
        let report = verify(&seq, Maximization::Closed, 2, 7);
        assert!(report.admissible);
        assert!(report.all_passed(), "report: {report:?}");
        assert!(report.discrepancy.unwrap() < 1e-6);
    }

    #[test]
    fn verify_flags_inadmissible_without_transport() {
        let e0 = DensityMatrix::pure(&[Complex64::new(1.0, 0.0), Complex64::new(0.0, 0.0)]).unwrap();
        let e1 = DensityMatrix::pure(&[Complex64::new(0.0, 0.0), Complex64::new(1.0, 0.0)]).unwrap();
        let seq = SequenceSpec::new(vec![e0.clone(), e1, e0], None).unwrap();
        let report = verify(&seq, Maximization::Closed, 2, 7);
        assert!(!report.admissible);
        assert_eq!(report.failing_index, Some(0));
        assert!(report.checks.is_empty(), "no transport on inadmissible input");
    }

    #[test]
    fn constant_sequence_objective_is_maximal() {
        let sigma = random_density(2, 2, 200).unwrap();
        let seq = SequenceSpec::new(vec![sigma.clone(), sigma.clone(), sigma], None).unwrap();
        let h = operational_holonomy(&seq, &default_initial_amplitude(&seq), Maximization::Closed)
            .unwrap();
        for rec in &h.records {
            let expect = 0.5 + 1.0 / (2.0 * seq.dim() as f64);
            assert!((rec.objective - expect).abs() < 1e-10);
        }
    }

    #[test]
    fn sampled_path_forms_valid_sequence() {
        let base = random_density(2, 2, 210).unwrap();
        let seq = sample_path(
            |t| {
                let angle = 0.3 * t;
                let rot = ComplexMatrix::from_fn(2, 2, |i, j| match (i, j) {
                    (0, 0) | (1, 1) => Complex64::new(angle.cos(), 0.0),
                    (0, 1) => Complex64::new(-angle.sin(), 0.0),
                    _ => Complex64::new(angle.sin(), 0.0),
                });
                DensityMatrix::new((&(&rot * base.matrix()) * &rot.dagger()).hermitian_part())
            },
            5,
        )
        .unwrap();
        assert_eq!(seq.len(), 5);
        assert!(seq.labels().is_some());
        assert_eq!(is_admissible(&seq), (true, None));
    }
}
