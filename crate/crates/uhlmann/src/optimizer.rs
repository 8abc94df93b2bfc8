//! Maximization of Re Tr(A V^dagger) over unitaries and over contractions
//! (V V^dagger <= 1): the closed form through the polar factors of A, and a
//! black-box local ascent standing in for the operational "vary the
//! preparations" search. The two must agree, which is the empirical form of
//! the claim that the objective has no spurious local maxima.

use serde::Serialize;
use thiserror::Error;

use crate::linalg::{
    complete_to_unitary, exp_skew, range_projector, rank_tolerance, svd, zero_cutoff,
    ComplexMatrix, LinalgError,
};
use crate::states::{DensityMatrix, StateError, Subamplitude};

#[derive(Debug, Error)]
pub enum OptimizerError {
    #[error(transparent)]
    Linalg(#[from] LinalgError),

    #[error(transparent)]
    State(#[from] StateError),

    #[error("start iterate is outside the {0:?} domain")]
    BadStart(Domain),

    #[error("ascent did not converge within {iterations} iterations (best value {value})")]
    NoConvergence {
        iterations: usize,
        value: f64,
        best: Box<MaximizerResult>,
    },
}

pub type OptimizerResult<T> = Result<T, OptimizerError>;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Domain {
    /// Full unitary group.
    Unitary,
    /// Operators with all singular values at most one.
    Contraction,
}

/// Which maximization backend to use.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Maximization {
    Closed,
    Ascent,
}

#[derive(Clone, Debug, Serialize)]
pub struct MaximizerResult {
    /// Canonical maximizer: the polar partial isometry of A, completed to a
    /// unitary in the unitary domain.
    pub vstar: ComplexMatrix,
    /// Achieved objective, equal to the sum of singular values of A.
    pub value: f64,
    /// Projector onto R(A^dagger).
    pub support_in: ComplexMatrix,
    /// Projector onto R(A).
    pub support_out: ComplexMatrix,
    /// (iteration, objective) pairs when produced by the iterative route.
    pub trace: Vec<(usize, f64)>,
}

/// Step-size and termination parameters for [`ascend`]. The step rule is
/// backtracking halving from `initial_step`; iteration stops when an accepted
/// step gains less than `tol`, or when no improving step exists.
#[derive(Clone, Copy, Debug)]
pub struct AscentOptions {
    pub initial_step: f64,
    pub tol: f64,
    pub max_iters: usize,
}

impl Default for AscentOptions {
    fn default() -> Self {
        Self { initial_step: 0.5, tol: 1e-10, max_iters: 10_000 }
    }
}

fn objective(a: &ComplexMatrix, v: &ComplexMatrix) -> f64 {
    a.trace_product(&v.dagger()).re
}

/// Closed-form maximizer of Re Tr(A V^dagger): V = pinv(sqrt(A A^dagger)) A
/// up to the free component on the orthogonal complements, fixed here to
/// zero (contraction domain) or to the canonical unitary completion (unitary
/// domain). The value is Tr sqrt(A A^dagger) in both domains.
pub fn maximize_closed(a: &ComplexMatrix, domain: Domain) -> MaximizerResult {
    assert!(a.is_square(), "maximize_closed requires a square matrix");
    let n = a.rows();
    let f = svd(a).expect("SVD failed to converge");
    let cutoff = zero_cutoff(f.largest(), rank_tolerance());
    let value: f64 = f.singular_values.iter().sum();

    let mut isometry = ComplexMatrix::zeros(n, n);
    let mut support_in = ComplexMatrix::zeros(n, n);
    let mut support_out = ComplexMatrix::zeros(n, n);
    for (k, &s) in f.singular_values.iter().enumerate() {
        if s <= cutoff {
            continue;
        }
        let u = f.u.column(k);
        let v = f.v.column(k);
        for i in 0..n {
            for j in 0..n {
                isometry[(i, j)] += u[i] * v[j].conj();
                support_out[(i, j)] += u[i] * u[j].conj();
                support_in[(i, j)] += v[i] * v[j].conj();
            }
        }
    }
    let vstar = match domain {
        Domain::Contraction => isometry,
        Domain::Unitary => complete_to_unitary(&isometry)
            .expect("polar isometry must complete to a unitary"),
    };
    MaximizerResult { vstar, value, support_in, support_out, trace: Vec::new() }
}

/// Local ascent with the algebraic objective Re Tr(A V^dagger).
pub fn ascend(
    a: &ComplexMatrix,
    domain: Domain,
    start: &ComplexMatrix,
    opts: AscentOptions,
) -> OptimizerResult<MaximizerResult> {
    ascend_with_objective(a, domain, start, opts, |v| objective(a, v))
}

/// Local ascent driven by an arbitrary evaluation of the objective, e.g. the
/// interferometric functional on encoded states. `a` still supplies the step
/// direction (the Euclidean gradient of the trace objective); acceptance is
/// decided purely by `eval`, so the caller's functional is what the search
/// actually climbs.
pub fn ascend_with_objective(
    a: &ComplexMatrix,
    domain: Domain,
    start: &ComplexMatrix,
    opts: AscentOptions,
    mut eval: impl FnMut(&ComplexMatrix) -> f64,
) -> OptimizerResult<MaximizerResult> {
    assert!(a.is_square() && a.shape() == start.shape(), "ascend shape mismatch");
    if !in_domain(start, domain) {
        return Err(OptimizerError::BadStart(domain));
    }

    let mut v = start.clone();
    let mut value = eval(&v);
    let mut trace = vec![(0usize, value)];

    for iter in 1..=opts.max_iters {
        let mut step = opts.initial_step;
        let mut improved = false;
        let mut gain = 0.0;

        match domain {
            Domain::Unitary => {
                // Right-translated gradient direction: the skew part of
                // V^dagger A; V exp(t S) increases the objective to first
                // order.
                let m = &v.dagger() * a;
                let skew = &(&m - &m.dagger()).scale(0.5);
                if skew.frobenius_norm() > 1e-300 {
                    for _ in 0..60 {
                        let candidate = &v * &exp_skew(skew, step)?;
                        let candidate_value = eval(&candidate);
                        if candidate_value > value {
                            gain = candidate_value - value;
                            v = candidate;
                            value = candidate_value;
                            improved = true;
                            break;
                        }
                        step *= 0.5;
                    }
                }
            }
            Domain::Contraction => {
                // Euclidean gradient step followed by singular-value clipping
                // back into the contraction ball.
                for _ in 0..60 {
                    let candidate = clip_contraction(&(&v + &a.scale(step)));
                    let candidate_value = eval(&candidate);
                    if candidate_value > value {
                        gain = candidate_value - value;
                        v = candidate;
                        value = candidate_value;
                        improved = true;
                        break;
                    }
                    step *= 0.5;
                }
            }
        }

        trace.push((iter, value));
        if !improved || gain < opts.tol {
            return Ok(finish(a, v, value, trace));
        }
    }

    let best = finish(a, v, value, trace);
    Err(OptimizerError::NoConvergence {
        iterations: opts.max_iters,
        value,
        best: Box::new(best),
    })
}

fn finish(a: &ComplexMatrix, v: ComplexMatrix, value: f64, trace: Vec<(usize, f64)>) -> MaximizerResult {
    MaximizerResult {
        vstar: v,
        value,
        support_in: range_projector(&a.dagger()),
        support_out: range_projector(a),
        trace,
    }
}

fn in_domain(v: &ComplexMatrix, domain: Domain) -> bool {
    match domain {
        Domain::Unitary => v.unitarity_defect() <= 1e-8 * (1.0 + v.frobenius_norm()),
        Domain::Contraction => {
            svd(v).map(|f| f.largest() <= 1.0 + 1e-9).unwrap_or(false)
        }
    }
}

/// Project onto the contraction ball by clamping singular values to one.
pub fn clip_contraction(v: &ComplexMatrix) -> ComplexMatrix {
    let f = svd(v).expect("SVD failed to converge");
    if f.largest() <= 1.0 {
        return v.clone();
    }
    let n_out = v.rows();
    let mut out = ComplexMatrix::zeros(v.rows(), v.cols());
    for (k, &s) in f.singular_values.iter().enumerate() {
        let w = s.min(1.0);
        if w == 0.0 {
            continue;
        }
        let u = f.u.column(k);
        let vk = f.v.column(k);
        for i in 0..n_out {
            let ui = u[i] * w;
            for j in 0..v.cols() {
                out[(i, j)] += ui * vk[j].conj();
            }
        }
    }
    out
}

/// One parallel-transport substep: the subamplitude of `sigma_next` whose
/// encoded state maximizes the parallelity functional against the current
/// subamplitude `w_current` of the previous state. The objective reduces to
/// Re Tr(A V^dagger) with A = sqrt(sigma_next) * W_current.
pub fn parallel_amplitude(
    sigma_next: &DensityMatrix,
    w_current: &ComplexMatrix,
    method: Maximization,
) -> OptimizerResult<Subamplitude> {
    let a = sigma_next.sqrt() * w_current;
    let vstar = match method {
        Maximization::Closed => maximize_closed(&a, Domain::Contraction).vstar,
        Maximization::Ascent => {
            let start = ComplexMatrix::zeros(a.rows(), a.cols());
            ascend(&a, Domain::Contraction, &start, AscentOptions::default())?.vstar
        }
    };
    Subamplitude::new(sigma_next.clone(), clip_contraction(&vstar)).map_err(OptimizerError::State)
}
