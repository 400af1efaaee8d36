//! Distributional checks on the common-Haar-family oracle: determinism in
//! the seed, Haar moments over fresh instances, independence across indices,
//! and the algebra of the swap/reflection gadget.

use ndarray::Array1;
use ndarray_linalg::c64;

use chfs_lab::bits::BitString;
use chfs_lab::hilbert::{partial_trace, PureState, SubsystemSpec};
use chfs_lab::oracle::{swap_unitary, ChfsInstance, LengthFunction};
use chfs_lab::state_tests::lubkin_expectation;
use chfs_lab::stats::mean_and_se;

fn x(bits: &str) -> BitString {
    bits.parse().expect("literal bit string")
}

#[test]
fn states_are_deterministic_in_seed_and_index() {
    let a = ChfsInstance::new(7, LengthFunction::Constant(3));
    let b = ChfsInstance::new(7, LengthFunction::Constant(3));
    let c = ChfsInstance::new(8, LengthFunction::Constant(3));

    let xa = a.oracle_state(&x("1011")).unwrap();
    let xb = b.oracle_state(&x("1011")).unwrap();
    assert_eq!(xa.amplitudes(), xb.amplitudes(), "same seed and index must agree bitwise");

    let xc = c.oracle_state(&x("1011")).unwrap();
    assert!(
        xa.overlap_sq(&xc).unwrap() < 1.0 - 1e-6,
        "fresh master seed should re-sample the family"
    );

    // Same value, different index length: distinct indices, distinct states.
    let short = a.oracle_state(&x("11")).unwrap();
    let long = a.oracle_state(&x("011")).unwrap();
    assert!(short.overlap_sq(&long).unwrap() < 1.0 - 1e-6);
}

#[test]
fn output_length_follows_the_declared_length_function() {
    let cases: [(LengthFunction, [usize; 5]); 4] = [
        (LengthFunction::Identity, [1, 2, 3, 4, 5]),
        (LengthFunction::FloorLog, [1, 1, 1, 2, 2]),
        (LengthFunction::TwoFloorLog, [1, 2, 3, 4, 4]),
        (LengthFunction::Constant(2), [2, 2, 2, 2, 2]),
    ];
    for (length_fn, expected) in cases {
        let inst = ChfsInstance::new(1, length_fn);
        for (len, want) in (1..=5).zip(expected) {
            assert_eq!(inst.output_qubits(len), want, "{length_fn:?} at |x| = {len}");
            let state = inst.oracle_state(&BitString::from_value(0, len).unwrap()).unwrap();
            assert_eq!(state.qubits(), want);
        }
    }
}

/// First and second Haar moments over fresh oracle instances at ℓ = 3:
/// E|⟨0|φ⟩|² = 1/8 and E|⟨φ_x|φ_y⟩|² = 1/8 for x ≠ y, both with variance
/// (N−1)/(N²(N+1)).
#[test]
fn moments_over_fresh_instances_match_haar() {
    let zero = PureState::zero(3).unwrap();
    let instances = 2_000u64;
    let mut first = Vec::with_capacity(instances as usize);
    let mut cross = Vec::with_capacity(instances as usize);
    for seed in 0..instances {
        let inst = ChfsInstance::new(seed, LengthFunction::Constant(3));
        let phi_x = inst.oracle_state(&x("01")).unwrap();
        let phi_y = inst.oracle_state(&x("10")).unwrap();
        first.push(phi_x.overlap_sq(&zero).unwrap());
        cross.push(phi_x.overlap_sq(&phi_y).unwrap());
    }
    let expect = 1.0 / 8.0;
    for (name, samples) in [("⟨0|φ⟩", first), ("⟨φ_x|φ_y⟩", cross)] {
        let (mean, se) = mean_and_se(&samples);
        assert!(
            (mean - expect).abs() <= 5.0 * se,
            "{name}: mean {mean:.5} vs {expect:.5} (5σ = {:.5})",
            5.0 * se
        );
    }
}

/// Reduced purity of oracle states reproduces the Lubkin mean — the same
/// moment the verification grid checks for directly sampled Haar states,
/// here flowing through the keyed-family construction instead.
#[test]
fn oracle_states_have_lubkin_reduced_purity() {
    let spec = SubsystemSpec::from_qubit_parts(&[1, 2]).unwrap();
    let mut purities = Vec::with_capacity(2_000);
    for seed in 0..2_000u64 {
        let inst = ChfsInstance::new(0x5eed_0000 + seed, LengthFunction::Constant(3));
        let phi = inst.oracle_state(&x("110")).unwrap().to_density();
        purities.push(partial_trace(&phi, &spec, &[0]).unwrap().purity());
    }
    let (mean, se) = mean_and_se(&purities);
    let expect = lubkin_expectation(2, 4);
    assert!(
        (mean - expect).abs() <= 5.0 * se,
        "mean reduced purity {mean:.5} vs {expect:.5} (5σ = {:.5})",
        5.0 * se
    );
}

/// The swap gadget reflects |0…0⟩ ↦ |φ_x⟩|1⟩ and back, fixes the orthogonal
/// complement, and is exactly unitary.
#[test]
fn swap_unitary_reflects_between_flag_states() {
    let inst = ChfsInstance::new(42, LengthFunction::Constant(2));
    let index = x("101");
    let phi = inst.oracle_state(&index).unwrap();
    let swap = swap_unitary(&inst, &index).unwrap();

    // |t⟩ = |φ_x⟩|1⟩ in the big-endian register (appended qubit least
    // significant).
    let dim = 2 * phi.amplitudes().len();
    let mut target = Array1::<c64>::zeros(dim);
    for (i, &a) in phi.amplitudes().iter().enumerate() {
        target[2 * i + 1] = a;
    }
    let target = PureState::new(target).unwrap();
    let zero = PureState::zero(phi.qubits() + 1).unwrap();

    let u = swap.unitary();
    let forward = u.apply(&zero).unwrap();
    assert!(forward.overlap_sq(&target).unwrap() > 1.0 - 1e-10, "U|0…0⟩ should be |φ_x⟩|1⟩");
    let back = u.apply(&target).unwrap();
    assert!(back.overlap_sq(&zero).unwrap() > 1.0 - 1e-10, "U|φ_x⟩|1⟩ should be |0…0⟩");

    // A vector orthogonal to both flag states is fixed: |φ_x⟩|0⟩ has its
    // amplitude on even indices only, and ⟨0…0|φ_x,0⟩ = ⟨0|φ_x⟩ may be
    // nonzero, so project that component out first.
    let mut fixed = Array1::<c64>::zeros(dim);
    for (i, &a) in phi.amplitudes().iter().enumerate() {
        fixed[2 * i] = a;
    }
    fixed[0] = c64::new(0.0, 0.0);
    let norm = fixed.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    if norm > 1e-3 {
        let fixed = PureState::new(fixed.mapv(|z| z / norm)).unwrap();
        let image = u.apply(&fixed).unwrap();
        assert!(image.overlap_sq(&fixed).unwrap() > 1.0 - 1e-10);
    }

    // Unitarity: columns orthonormal.
    let m = u.matrix();
    for i in 0..dim {
        for j in 0..dim {
            let mut dot = c64::new(0.0, 0.0);
            for k in 0..dim {
                dot += m[[k, i]].conj() * m[[k, j]];
            }
            let want = if i == j { 1.0 } else { 0.0 };
            assert!((dot - c64::new(want, 0.0)).norm() < 1e-10, "U†U[{i},{j}] = {dot}");
        }
    }
}
