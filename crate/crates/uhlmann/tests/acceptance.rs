//! Acceptance suite: one test per criterion, each printing a PASS/FAIL line
//! with the measured extremes. Run with `cargo test --test acceptance`
//! (add `-- --nocapture` to see the lines for passing criteria too).

use std::time::Instant;

use num_complex::Complex64;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;

use uhlmann::interferometry::{build_z, parallelity_circuit, probe_probability};
use uhlmann::linalg::{svd, ComplexMatrix};
use uhlmann::optimizer::{ascend, maximize_closed, AscentOptions, Domain, Maximization};
use uhlmann::preparation::{build_plan, horn_unitary};
use uhlmann::states::{encode, random_density, random_unitary, DensityMatrix, Subamplitude};
use uhlmann::transport::{
    analytic_holonomy, default_initial_amplitude, is_admissible, operational_holonomy,
    random_equal_support_sequence, random_faithful_sequence, random_initial_amplitude,
    random_pure_sequence,
};

fn random_contraction(n: usize, rng: &mut ChaCha12Rng) -> ComplexMatrix {
    let u = uhlmann::states::random_unitary_with(n, rng);
    let x = uhlmann::states::random_unitary_with(n, rng);
    let s: Vec<f64> = (0..n).map(|_| rng.gen::<f64>()).collect();
    &(&u * &ComplexMatrix::real_diagonal(&s)) * &x.dagger()
}

#[test]
fn criterion_1_oracle_equivalence_faithful() {
    let started = Instant::now();
    let mut rng = ChaCha12Rng::seed_from_u64(0xC1);
    let mut max_closed = 0.0f64;
    let mut max_ascent = 0.0f64;
    for trial in 0..100u64 {
        let n = 2 + (rng.gen::<u32>() % 3) as usize; // 2..=4
        let k = 2 + (rng.gen::<u32>() % 7) as usize; // 2..=8
        let seq = random_faithful_sequence(n, k, 0x1000 + trial).unwrap();
        let oracle = analytic_holonomy(&seq).unwrap();
        let init = default_initial_amplitude(&seq);

        let closed = operational_holonomy(&seq, &init, Maximization::Closed).unwrap();
        max_closed = max_closed.max(closed.u_uhl.distance(&oracle.u_uhl));

        let ascent = operational_holonomy(&seq, &init, Maximization::Ascent).unwrap();
        max_ascent = max_ascent.max(ascent.u_uhl.distance(&oracle.u_uhl));
    }
    let elapsed = started.elapsed().as_secs_f64();
    let pass = max_closed <= 1e-6 && max_ascent <= 1e-5 && elapsed <= 60.0;
    println!(
        "criterion 1 (oracle equivalence, faithful): {} — max closed {max_closed:.3e} (tol 1e-6), \
         max ascent {max_ascent:.3e} (tol 1e-5), runtime {elapsed:.1} s (limit 60 s)",
        if pass { "PASS" } else { "FAIL" }
    );
    assert!(max_closed <= 1e-6, "closed-route discrepancy {max_closed:.3e} exceeds 1e-6");
    assert!(max_ascent <= 1e-5, "ascent-route discrepancy {max_ascent:.3e} exceeds 1e-5");
    assert!(elapsed <= 60.0, "runtime {elapsed:.1} s exceeds the 60 s budget");
}

#[test]
fn criterion_2_oracle_equivalence_unfaithful() {
    let mut max_holonomy = 0.0f64;
    let mut max_projector = 0.0f64;
    let mut rng = ChaCha12Rng::seed_from_u64(0xC2);
    for trial in 0..30u64 {
        let k = 3 + (rng.gen::<u32>() % 4) as usize; // 3..=6
        let seq = random_equal_support_sequence(4, 2, k, 0x2000 + trial).unwrap();
        let (ok, idx) = is_admissible(&seq);
        assert!(ok, "equal-support sequence must be admissible, failed at {idx:?}");

        let oracle = analytic_holonomy(&seq).unwrap();
        let init = default_initial_amplitude(&seq);
        let op = operational_holonomy(&seq, &init, Maximization::Closed).unwrap();

        // Both holonomies are restricted to the final support already.
        max_holonomy = max_holonomy.max(op.u_uhl.distance(&oracle.u_uhl));
        for rec in &op.records {
            let gram = &rec.vtilde * &rec.vtilde.dagger();
            max_projector = max_projector.max(gram.distance(&rec.projector));
        }
    }
    let pass = max_holonomy <= 1e-6 && max_projector <= 1e-8;
    println!(
        "criterion 2 (oracle equivalence, unfaithful): {} — max holonomy {max_holonomy:.3e} \
         (tol 1e-6), max projector identity {max_projector:.3e} (tol 1e-8)",
        if pass { "PASS" } else { "FAIL" }
    );
    assert!(max_holonomy <= 1e-6);
    assert!(max_projector <= 1e-8);
}

#[test]
fn criterion_3_circuit_formula_agreement() {
    let mut rng = ChaCha12Rng::seed_from_u64(0xC3);
    let mut max_parallelity = 0.0f64;
    let mut max_probe = 0.0f64;
    for trial in 0..200u64 {
        let n = 1 + (trial % 4) as usize;
        let sigma_a = random_density(n, n, 0x3000 + 3 * trial).unwrap();
        let sigma_b = random_density(n, n, 0x3001 + 3 * trial).unwrap();
        let v_a = uhlmann::states::random_unitary_with(n, &mut rng);
        let v_b = uhlmann::states::random_unitary_with(n, &mut rng);
        let sub_a = Subamplitude::new(sigma_a.clone(), v_a.clone()).unwrap();
        let sub_b = Subamplitude::new(sigma_b.clone(), v_b.clone()).unwrap();
        let rho_a = encode(&sigma_a, &sub_a).unwrap();
        let rho_b = encode(&sigma_b, &sub_b).unwrap();

        // Detection probability vs 3/4 + Re Tr(W_b^dagger W_a) / (4N).
        let p = parallelity_circuit(&rho_b, &rho_a).unwrap();
        let w_a = sub_a.w();
        let w_b = sub_b.w();
        let expect = 0.75 + w_b.dagger().trace_product(&w_a).re / (4.0 * n as f64);
        max_parallelity = max_parallelity.max((p - expect).abs());

        // Probe probability vs 1/2 + Re Tr(sqrt(sigma) V U^dagger)/(2 sqrt(N)).
        let u = uhlmann::states::random_unitary_with(n, &mut rng);
        let probe = probe_probability(&rho_a, &u).unwrap();
        let expect =
            0.5 + (sigma_a.sqrt() * &v_a).trace_product(&u.dagger()).re / (2.0 * (n as f64).sqrt());
        max_probe = max_probe.max((probe.probability - expect).abs());
    }
    let pass = max_parallelity <= 1e-10 && max_probe <= 1e-10;
    println!(
        "criterion 3 (circuit vs formula): {} — parallelity {max_parallelity:.3e}, probe \
         {max_probe:.3e} (tol 1e-10)",
        if pass { "PASS" } else { "FAIL" }
    );
    assert!(max_parallelity <= 1e-10);
    assert!(max_probe <= 1e-10);
}

#[test]
fn criterion_4_fidelity_link() {
    let mut rng = ChaCha12Rng::seed_from_u64(0xC4);
    let mut max_gap = 0.0f64;
    for trial in 0..100u64 {
        let n = 2 + (trial % 3) as usize;
        let sigma_a = random_density(n, n, 0x4000 + 2 * trial).unwrap();
        let sigma_b = random_density(n, n, 0x4001 + 2 * trial).unwrap();
        let v_a = uhlmann::states::random_unitary_with(n, &mut rng);
        let w_a = sigma_a.sqrt() * &v_a;

        // Maximizing Re Tr(W_b^dagger W_a) over amplitudes W_b of sigma_b
        // means maximizing over unitaries V_b for A = sqrt(sigma_b) W_a.
        let best = maximize_closed(&(sigma_b.sqrt() * &w_a), Domain::Unitary);
        let fid = uhlmann::transport::fidelity(&sigma_b, &sigma_a);
        max_gap = max_gap.max((best.value - fid).abs());
    }
    let pass = max_gap <= 1e-8;
    println!(
        "criterion 4 (fidelity link): {} — max |sup Re Tr - F| = {max_gap:.3e} (tol 1e-8)",
        if pass { "PASS" } else { "FAIL" }
    );
    assert!(max_gap <= 1e-8);
}

#[test]
fn criterion_5_preparation_correctness() {
    let mut rng = ChaCha12Rng::seed_from_u64(0xC5);
    let mut max_plan = 0.0f64;
    let mut max_horn = 0.0f64;
    for trial in 0..100u64 {
        let n = 2 + (trial % 7) as usize; // 2..=8
        let rank = 1 + (rng.gen::<u32>() as usize) % n;
        let sigma = random_density(n, rank, 0x5000 + trial).unwrap();
        let vt = random_contraction(n, &mut rng);

        let plan = build_plan(&sigma, &vt).unwrap();
        let out = plan.execute();
        let sub = Subamplitude::new(sigma.clone(), vt).unwrap();
        let target = encode(&sigma, &sub).unwrap().assemble();
        max_plan = max_plan.max(out.distance(&target));

        let horn = horn_unitary(sigma.eigenvalues());
        for j in 0..n {
            let mixed: f64 =
                (0..n).map(|k| horn[(j, k)].norm_sqr() * sigma.eigenvalues()[k]).sum();
            max_horn = max_horn.max((mixed - 1.0 / n as f64).abs());
        }
    }
    let pass = max_plan <= 1e-9 && max_horn <= 1e-12;
    println!(
        "criterion 5 (preparation correctness): {} — max plan error {max_plan:.3e} (tol 1e-9), \
         max mixing-row error {max_horn:.3e} (tol 1e-12)",
        if pass { "PASS" } else { "FAIL" }
    );
    assert!(max_plan <= 1e-9);
    assert!(max_horn <= 1e-12);
}

#[test]
fn criterion_6_gauge_invariance() {
    let mut rng = ChaCha12Rng::seed_from_u64(0xC6);
    let mut max_dev = 0.0f64;
    for trial in 0..20u64 {
        let n = 2 + (rng.gen::<u32>() % 2) as usize;
        let k = 3 + (rng.gen::<u32>() % 3) as usize;
        let seq = random_faithful_sequence(n, k, 0x6000 + trial).unwrap();
        let base =
            operational_holonomy(&seq, &default_initial_amplitude(&seq), Maximization::Closed)
                .unwrap();
        for t in 0..10u64 {
            let init = random_initial_amplitude(&seq, 0x6100 + 16 * trial + t);
            let h = operational_holonomy(&seq, &init, Maximization::Closed).unwrap();
            max_dev = max_dev.max(h.u_uhl.distance(&base.u_uhl));
        }
    }
    let pass = max_dev <= 1e-6;
    println!(
        "criterion 6 (gauge invariance): {} — max deviation {max_dev:.3e} (tol 1e-6)",
        if pass { "PASS" } else { "FAIL" }
    );
    assert!(max_dev <= 1e-6);
}

#[test]
fn criterion_7_structural_identities() {
    // Z is exactly a Hermitian permutation squaring to the identity.
    for n in 1..=4usize {
        let z = build_z(n).matrix;
        assert_eq!(z, z.dagger(), "Z = Z^dagger exactly at n = {n}");
        assert_eq!(
            &z * &z,
            ComplexMatrix::identity((2 * n) * (2 * n)),
            "Z^2 = 1 exactly at n = {n}"
        );
        let d = (2 * n) * (2 * n);
        for col in 0..d {
            let ones = (0..d)
                .filter(|&row| {
                    let v = z[(row, col)];
                    assert!(v.im == 0.0 && (v.re == 0.0 || v.re == 1.0), "entries must be 0/1");
                    v.re == 1.0
                })
                .count();
            assert_eq!(ones, 1, "Z must be a permutation");
        }
    }

    // Pure sequences reproduce the overlap-phase (Pancharatnam) holonomy.
    let mut max_pancharatnam = 0.0f64;
    for seed in 0..5u64 {
        let seq = random_pure_sequence(3, 5, 0x7000 + seed).unwrap();
        let h = analytic_holonomy(&seq).unwrap();
        let vectors: Vec<Vec<Complex64>> =
            seq.states().iter().map(|s| s.eigenvectors().column(2)).collect();
        let mut phase = Complex64::new(1.0, 0.0);
        for w in vectors.windows(2) {
            let overlap: Complex64 = w[1].iter().zip(w[0].iter()).map(|(a, b)| a.conj() * b).sum();
            phase *= overlap / overlap.norm();
        }
        let expect = ComplexMatrix::from_fn(3, 3, |i, j| {
            phase * vectors[vectors.len() - 1][i] * vectors[0][j].conj()
        });
        max_pancharatnam = max_pancharatnam.max(h.u_uhl.distance(&expect));
    }

    // Constant and pairwise-commuting faithful sequences give the identity.
    let mut max_identity = 0.0f64;
    let sigma = random_density(3, 3, 0x7100).unwrap();
    let seq = uhlmann::SequenceSpec::new(
        vec![sigma.clone(), sigma.clone(), sigma.clone(), sigma],
        None,
    )
    .unwrap();
    let h = analytic_holonomy(&seq).unwrap();
    max_identity = max_identity.max(h.u_uhl.distance(&ComplexMatrix::identity(3)));

    let u = random_unitary(3, 0x7200);
    let commuting: Vec<DensityMatrix> = [
        [0.5, 0.3, 0.2],
        [0.1, 0.6, 0.3],
        [0.2, 0.5, 0.3],
        [0.4, 0.4, 0.2],
    ]
    .iter()
    .map(|d| {
        let diag = ComplexMatrix::real_diagonal(d);
        DensityMatrix::new((&(&u * &diag) * &u.dagger()).hermitian_part()).unwrap()
    })
    .collect();
    let seq = uhlmann::SequenceSpec::new(commuting, None).unwrap();
    let h = analytic_holonomy(&seq).unwrap();
    max_identity = max_identity.max(h.u_uhl.distance(&ComplexMatrix::identity(3)));

    let pass = max_pancharatnam <= 1e-8 && max_identity <= 1e-8;
    println!(
        "criterion 7 (structural identities): {} — Z exact, overlap-phase {max_pancharatnam:.3e}, \
         identity holonomy {max_identity:.3e} (tol 1e-8)",
        if pass { "PASS" } else { "FAIL" }
    );
    assert!(max_pancharatnam <= 1e-8);
    assert!(max_identity <= 1e-8);
}

#[test]
fn criterion_8_no_spurious_maxima() {
    let mut rng = ChaCha12Rng::seed_from_u64(0xC8);
    let mut failures = 0usize;
    let mut max_gap = 0.0f64;
    for objective in 0..20u64 {
        let n = 2 + (objective % 3) as usize;
        let a = ComplexMatrix::from_fn(n, n, |_, _| {
            Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))
        });
        let target: f64 = svd(&a).unwrap().singular_values.iter().sum();
        let domain = if objective % 4 == 0 { Domain::Unitary } else { Domain::Contraction };
        for _ in 0..50 {
            let start = match domain {
                Domain::Unitary => uhlmann::states::random_unitary_with(n, &mut rng),
                Domain::Contraction => {
                    uhlmann::states::random_unitary_with(n, &mut rng).scale(rng.gen::<f64>())
                }
            };
            match ascend(&a, domain, &start, AscentOptions::default()) {
                Ok(r) => {
                    let gap = (r.value - target).abs();
                    max_gap = max_gap.max(gap);
                    if gap > 1e-6 {
                        failures += 1;
                    }
                }
                Err(_) => failures += 1,
            }
        }
    }
    let pass = failures == 0;
    println!(
        "criterion 8 (no spurious maxima): {} — {failures} failures out of 1000 ascents, \
         max gap {max_gap:.3e} (tol 1e-6)",
        if pass { "PASS" } else { "FAIL" }
    );
    assert_eq!(failures, 0, "{failures} ascents missed the global maximum");
}
