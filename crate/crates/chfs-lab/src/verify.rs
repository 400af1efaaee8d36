//! Verification of the standalone analytic claims the laboratory leans on:
//! Haar-measure identities, overlap concentration, the product-test value,
//! the measurement-decomposition bound, gentle-measurement inequalities,
//! near-pure structure lemmas, and the cap-geometry inequalities behind the
//! separation conjecture.
//!
//! Each check produces a [`VerificationReport`] pairing the claimed value
//! with an estimate. Exact claims are computed in closed form and compared
//! at numerical tolerance; statistical claims are sampled and judged at five
//! standard errors, wide enough to keep a ~30-cell grid quiet under honest
//! sampling while still catching a wrong formula. Identical seeds reproduce
//! identical reports byte for byte.

use ndarray::{Array1, Array2};
use ndarray_linalg::c64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::fmt;

use crate::error::{Error, Result};
use crate::hilbert::{
    closest_pure_state, dephase_qubits, haar_state, one_norm_hermitian, partial_trace,
    projector_expectation_bits, DensityMatrix, PureState, SubsystemSpec, UnitaryMatrix,
};
use crate::rng::LabRng;
use crate::state_tests::{lubkin_expectation, product_test_prob};
use crate::stats::{binomial_se, mean_and_se};

/// Tolerance for claims computed in closed form rather than sampled.
const EXACT_TOL: f64 = 1e-9;

/// Statistical claims are Violated only past this many standard errors.
const VERDICT_SIGMA: f64 = 5.0;

/// Stream tag for the verification grid's derived generators.
const STREAM_VERIFY: u64 = 0x7665_7269;

// ---------------------------------------------------------------------------
// Reports
// ---------------------------------------------------------------------------

/// What kind of claim a report checks.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum ClaimKind {
    /// The estimate should equal the claimed value (two-sided).
    Equality,
    /// The estimate should not exceed the claimed value (one-sided).
    UpperBound,
    /// The estimate should not fall below the claimed value (one-sided).
    LowerBound,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Verdict {
    Consistent,
    Violated,
    /// The instance sits outside the regime the claim is proved in; nothing
    /// is asserted.
    Inconclusive,
}

/// One verification outcome: a claim, an estimate, and the judgment.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VerificationReport {
    pub lemma: String,
    pub kind: ClaimKind,
    pub claimed: f64,
    pub estimate: f64,
    /// Standard error of the estimate; zero for closed-form computations.
    pub std_error: f64,
    /// Monte Carlo sample count; zero for closed-form computations.
    pub samples: usize,
    pub verdict: Verdict,
    pub note: String,
}

impl VerificationReport {
    /// Judge `estimate` against `claimed` and assemble the report. Exact
    /// checks (`samples == 0`) are held to numerical tolerance; sampled
    /// checks to [`VERDICT_SIGMA`] standard errors.
    fn judged(
        lemma: &str,
        kind: ClaimKind,
        claimed: f64,
        estimate: f64,
        std_error: f64,
        samples: usize,
        note: String,
    ) -> Self {
        let slack = if samples == 0 { EXACT_TOL } else { VERDICT_SIGMA * std_error + EXACT_TOL };
        let violated = match kind {
            ClaimKind::Equality => (estimate - claimed).abs() > slack,
            ClaimKind::UpperBound => estimate > claimed + slack,
            ClaimKind::LowerBound => estimate < claimed - slack,
        };
        VerificationReport {
            lemma: lemma.to_string(),
            kind,
            claimed,
            estimate,
            std_error,
            samples,
            verdict: if violated { Verdict::Violated } else { Verdict::Consistent },
            note,
        }
    }

    fn inconclusive(lemma: &str, kind: ClaimKind, claimed: f64, estimate: f64, note: String) -> Self {
        VerificationReport {
            lemma: lemma.to_string(),
            kind,
            claimed,
            estimate,
            std_error: 0.0,
            samples: 0,
            verdict: Verdict::Inconclusive,
            note,
        }
    }
}

impl fmt::Display for VerificationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let rel = match self.kind {
            ClaimKind::Equality => "=",
            ClaimKind::UpperBound => "≤",
            ClaimKind::LowerBound => "≥",
        };
        write!(
            f,
            "[{:?}] {}: estimate {:.6} {} claimed {:.6} (se {:.2e}, {} samples){}",
            self.verdict,
            self.lemma,
            self.estimate,
            rel,
            self.claimed,
            self.std_error,
            self.samples,
            if self.note.is_empty() { String::new() } else { format!(" — {}", self.note) }
        )
    }
}

/// Render reports as a Markdown table, one row per report, in input order.
pub fn reports_markdown(reports: &[VerificationReport]) -> String {
    let mut out = String::from(
        "| lemma | kind | claimed | estimate | std error | samples | verdict | note |\n\
         |---|---|---|---|---|---|---|---|\n",
    );
    for r in reports {
        out.push_str(&format!(
            "| {} | {:?} | {:.6} | {:.6} | {:.3e} | {} | {:?} | {} |\n",
            r.lemma, r.kind, r.claimed, r.estimate, r.std_error, r.samples, r.verdict, r.note
        ));
    }
    out
}

/// Standard error used to judge a probability estimate: the larger of the
/// sample-based and claim-based binomial errors, so that rare events whose
/// expected count rounds to zero are judged against the claim's own scale
/// rather than a degenerate zero.
fn probability_se(claim: f64, estimate: f64, samples: usize) -> f64 {
    binomial_se(estimate, samples).max(binomial_se(claim.clamp(0.0, 1.0), samples))
}

// ---------------------------------------------------------------------------
// Haar identities
// ---------------------------------------------------------------------------

/// Mean of `⟨φ|Π|φ⟩` over Haar `φ` against a rank-`D` projector on `n`
/// qubits: exactly `D/2^n`.
pub fn verify_haar_projection(
    n: usize,
    d: usize,
    samples: usize,
    rng: &mut LabRng,
) -> Result<VerificationReport> {
    let dim = checked_dim(n)?;
    if d == 0 || d > dim {
        return Err(Error::InvalidArgument(format!("rank {d} outside 1..={dim}")));
    }
    if samples == 0 {
        return Err(Error::InvalidArgument("need at least one sample".into()));
    }
    // Haar invariance makes the projector's orientation irrelevant; use the
    // first D computational basis vectors.
    let values: Vec<f64> = (0..samples)
        .map(|_| -> Result<f64> {
            let phi = haar_state(n, rng)?;
            Ok(phi.amplitudes().iter().take(d).map(|a| a.norm_sqr()).sum())
        })
        .collect::<Result<_>>()?;
    let (mean, se) = mean_and_se(&values);
    let claimed = d as f64 / dim as f64;
    Ok(VerificationReport::judged(
        "haar-projection-mean",
        ClaimKind::Equality,
        claimed,
        mean,
        se,
        samples,
        format!("n = {n}, rank D = {d}"),
    ))
}

/// Mean purity of the left factor of a Haar state split into
/// `qubits_s | qubits_b`: exactly the Lubkin value
/// `(d_S + d_B)/(d_S·d_B + 1)`.
pub fn verify_lubkin_purity(
    qubits_s: usize,
    qubits_b: usize,
    samples: usize,
    rng: &mut LabRng,
) -> Result<VerificationReport> {
    if qubits_s == 0 || qubits_b == 0 {
        return Err(Error::InvalidArgument("both factors need at least one qubit".into()));
    }
    checked_dim(qubits_s + qubits_b)?;
    if samples == 0 {
        return Err(Error::InvalidArgument("need at least one sample".into()));
    }
    let spec = SubsystemSpec::from_qubit_parts(&[qubits_s, qubits_b])?;
    let values: Vec<f64> = (0..samples)
        .map(|_| -> Result<f64> {
            let psi = haar_state(qubits_s + qubits_b, rng)?.to_density();
            Ok(partial_trace(&psi, &spec, &[0])?.purity())
        })
        .collect::<Result<_>>()?;
    let (mean, se) = mean_and_se(&values);
    let claimed = lubkin_expectation(1 << qubits_s, 1 << qubits_b);
    Ok(VerificationReport::judged(
        "lubkin-mean-purity",
        ClaimKind::Equality,
        claimed,
        mean,
        se,
        samples,
        format!("split {qubits_s}|{qubits_b} qubits"),
    ))
}

/// Probability that a Haar state lands within squared overlap `1 − ε` of a
/// fixed pure state: exactly `ε^(2^n − 1)`.
pub fn verify_concentration_overlap(
    n: usize,
    epsilon: f64,
    samples: usize,
    rng: &mut LabRng,
) -> Result<VerificationReport> {
    checked_dim(n)?;
    if !(0.0..=1.0).contains(&epsilon) {
        return Err(Error::InvalidArgument(format!("epsilon {epsilon} outside [0,1]")));
    }
    if samples == 0 {
        return Err(Error::InvalidArgument("need at least one sample".into()));
    }
    let mut hits = 0usize;
    for _ in 0..samples {
        let phi = haar_state(n, rng)?;
        if phi.amplitudes()[0].norm_sqr() >= 1.0 - epsilon {
            hits += 1;
        }
    }
    let estimate = hits as f64 / samples as f64;
    let claimed = epsilon.powi((1i32 << n) - 1);
    Ok(VerificationReport::judged(
        "overlap-concentration",
        ClaimKind::Equality,
        claimed,
        estimate,
        probability_se(claimed, estimate, samples),
        samples,
        format!("n = {n}, ε = {epsilon}, exponent 2^n − 1 = {}", (1usize << n) - 1),
    ))
}

/// The `2·(3/4)^m` ceiling on a Haar state's expected product-test pass
/// probability over `m` single-qubit parts.
pub fn product_test_haar_bound(m: usize) -> f64 {
    2.0 * 0.75f64.powi(m as i32)
}

/// Mean product-test pass probability of a Haar state over `m` single-qubit
/// parts: exactly the average of Lubkin subset purities, and below the
/// `2·(3/4)^m` ceiling.
pub fn verify_product_test_haar(
    m: usize,
    samples: usize,
    rng: &mut LabRng,
) -> Result<VerificationReport> {
    checked_dim(m)?;
    if m == 0 || samples == 0 {
        return Err(Error::InvalidArgument("need m ≥ 1 and at least one sample".into()));
    }
    let spec = SubsystemSpec::from_qubit_parts(&vec![1; m])?;
    let values: Vec<f64> = (0..samples)
        .map(|_| -> Result<f64> {
            let phi = haar_state(m, rng)?.to_density();
            product_test_prob(&phi, &spec)
        })
        .collect::<Result<_>>()?;
    let (mean, se) = mean_and_se(&values);

    // Average the Lubkin purity over all 2^m subsets of the parts.
    let total = 1usize << m;
    let claimed = (0..total)
        .map(|s| {
            let d_s = 1usize << (s as u32).count_ones();
            lubkin_expectation(d_s, total / d_s)
        })
        .sum::<f64>()
        / total as f64;

    let bound = product_test_haar_bound(m);
    let within_bound = mean <= bound + VERDICT_SIGMA * se;
    let mut report = VerificationReport::judged(
        "product-test-haar-mean",
        ClaimKind::Equality,
        claimed,
        mean,
        se,
        samples,
        format!("m = {m}; ceiling 2·(3/4)^m = {bound:.6} {}", if within_bound { "respected" } else { "EXCEEDED" }),
    );
    if !within_bound {
        report.verdict = Verdict::Violated;
    }
    Ok(report)
}

// ---------------------------------------------------------------------------
// Measurement decomposition
// ---------------------------------------------------------------------------

/// One step of a pure measured circuit: a unitary on listed targets, or a
/// computational-basis measurement of one qubit whose outcome is kept as a
/// classical record (the channel dephases the qubit). No step discards a
/// register, so the algorithm stays pure-in-principle.
#[derive(Clone, Debug)]
pub enum CircuitStep {
    Unitary { op: UnitaryMatrix, targets: Vec<usize> },
    Measure { qubit: usize },
}

/// A unitary-plus-binary-measurement circuit on a fixed register.
#[derive(Clone, Debug)]
pub struct MeasuredCircuit {
    n_qubits: usize,
    steps: Vec<CircuitStep>,
}

impl MeasuredCircuit {
    pub fn new(n_qubits: usize, steps: Vec<CircuitStep>) -> Result<Self> {
        checked_dim(n_qubits)?;
        for step in &steps {
            match step {
                CircuitStep::Unitary { op, targets } => {
                    if targets.is_empty() || targets.iter().any(|&t| t >= n_qubits) {
                        return Err(Error::InvalidArgument(format!(
                            "unitary targets {targets:?} outside 0..{n_qubits}"
                        )));
                    }
                    let mut sorted = targets.clone();
                    sorted.sort_unstable();
                    sorted.dedup();
                    if sorted.len() != targets.len() {
                        return Err(Error::InvalidArgument(format!(
                            "duplicate unitary target in {targets:?}"
                        )));
                    }
                    if op.qubits() != targets.len() {
                        return Err(Error::DimensionMismatch {
                            expected: 1usize << targets.len(),
                            got: op.dim(),
                        });
                    }
                }
                CircuitStep::Measure { qubit } => {
                    if *qubit >= n_qubits {
                        return Err(Error::InvalidArgument(format!(
                            "measured qubit {qubit} outside 0..{n_qubits}"
                        )));
                    }
                }
            }
        }
        Ok(MeasuredCircuit { n_qubits, steps })
    }

    pub fn qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn steps(&self) -> &[CircuitStep] {
        &self.steps
    }

    /// Number of binary measurements.
    pub fn measurements(&self) -> usize {
        self.steps.iter().filter(|s| matches!(s, CircuitStep::Measure { .. })).count()
    }
}

/// The exact side-by-side run of a measured circuit and its projected
/// counterpart.
#[derive(Clone, Debug)]
pub struct DecompositionTrace {
    /// `1 − Tr(A(φ)²)` of the true output.
    pub epsilon: f64,
    /// `‖A(φ) − B(φ)‖₁` between the true channel and the argmax-projected
    /// one (the latter subnormalized).
    pub one_norm_gap: f64,
    /// Probability of each measurement's most likely outcome, taken on the
    /// true run's state just before that measurement.
    pub step_probabilities: Vec<f64>,
    /// The most likely outcomes, in measurement order.
    pub outcomes: Vec<u8>,
}

/// Run both channels exactly: the true one applies each measurement as a
/// dephasing channel; the projected one replaces it with the unnormalized
/// projection onto the true run's most likely outcome.
pub fn decomposition_trace(
    circuit: &MeasuredCircuit,
    input: &PureState,
) -> Result<DecompositionTrace> {
    if input.qubits() != circuit.n_qubits {
        return Err(Error::DimensionMismatch {
            expected: 1usize << circuit.n_qubits,
            got: input.amplitudes().len(),
        });
    }
    let mut real = input.to_density();
    let mut projected = real.matrix().clone();
    let mut step_probabilities = Vec::new();
    let mut outcomes = Vec::new();
    for step in &circuit.steps {
        match step {
            CircuitStep::Unitary { op, targets } => {
                real = crate::hilbert::apply_on_qubits_dm(op, targets, &real)?;
                let wrapped = DensityMatrix::new_unchecked(projected);
                projected =
                    crate::hilbert::apply_on_qubits_dm(op, targets, &wrapped)?.matrix().clone();
            }
            CircuitStep::Measure { qubit } => {
                let p0 = projector_expectation_bits(&real, &[*qubit], 0)?;
                let b: u8 = if p0 >= 0.5 { 0 } else { 1 };
                step_probabilities.push(p0.max(1.0 - p0));
                outcomes.push(b);
                real = dephase_qubits(&real, &[*qubit])?;
                projected = mask_qubit(&projected, circuit.n_qubits, *qubit, b);
            }
        }
    }
    let gap = one_norm_hermitian(&(real.matrix() - &projected))?;
    Ok(DecompositionTrace {
        epsilon: (1.0 - real.purity()).max(0.0),
        one_norm_gap: gap,
        step_probabilities,
        outcomes,
    })
}

/// Verify that replacing every measurement with the projection onto its most
/// likely outcome moves the output by at most `t·ε` in one-norm, where `ε`
/// is the true output's impurity, and that each most likely outcome carries
/// probability at least `1 − ε`.
pub fn verify_measurement_decomposition(
    circuit: &MeasuredCircuit,
    input: &PureState,
) -> Result<VerificationReport> {
    let trace = decomposition_trace(circuit, input)?;
    let t = circuit.measurements();
    let claimed = t as f64 * trace.epsilon;
    let min_step = trace.step_probabilities.iter().copied().fold(1.0f64, f64::min);
    let steps_ok = min_step >= 1.0 - trace.epsilon - EXACT_TOL;
    let mut report = VerificationReport::judged(
        "measurement-decomposition",
        ClaimKind::UpperBound,
        claimed,
        trace.one_norm_gap,
        0.0,
        0,
        format!(
            "t = {t}, ε = {:.3e}, min step probability {:.6} {} 1 − ε",
            trace.epsilon,
            min_step,
            if steps_ok { "≥" } else { "BELOW" }
        ),
    );
    if !steps_ok {
        report.verdict = Verdict::Violated;
    }
    Ok(report)
}

/// An engineered near-deterministic circuit: each of `t` fresh qubits is
/// tilted away from `|0⟩` by a random angle with `sin²θ ≤ max_tilt` (with a
/// random phase), measured, and then stirred into the already-measured
/// qubits by a Haar unitary — exercising unitaries between measurements
/// without disturbing the ones still pending.
pub fn tilted_measurement_chain(
    t: usize,
    max_tilt: f64,
    rng: &mut LabRng,
) -> Result<MeasuredCircuit> {
    if t == 0 {
        return Err(Error::InvalidArgument("need at least one measurement".into()));
    }
    if !(0.0..=0.5).contains(&max_tilt) {
        return Err(Error::InvalidArgument(format!("max tilt {max_tilt} outside [0, 1/2]")));
    }
    checked_dim(t)?;
    let mut steps = Vec::new();
    for i in 0..t {
        let tilt = max_tilt * rng.uniform();
        let phase = std::f64::consts::TAU * rng.uniform();
        let c = (1.0 - tilt).sqrt();
        let s = tilt.sqrt() * c64::new(phase.cos(), phase.sin());
        let op = UnitaryMatrix::new(ndarray::array![
            [c64::new(c, 0.0), -s.conj()],
            [s, c64::new(c, 0.0)],
        ])?;
        steps.push(CircuitStep::Unitary { op, targets: vec![i] });
        steps.push(CircuitStep::Measure { qubit: i });
        if i >= 1 && rng.coin(0.5) {
            let mix = crate::hilbert::haar_unitary(2, rng)?;
            steps.push(CircuitStep::Unitary { op: mix, targets: vec![i - 1, i] });
        }
    }
    MeasuredCircuit::new(t, steps)
}

// ---------------------------------------------------------------------------
// Gentle measurement
// ---------------------------------------------------------------------------

/// Verify the gentle-measurement inequalities for a binary projective
/// measurement `{Π, I−Π}` with `ε = 1 − Tr(Πρ)`: the outcome-forgetting
/// channel moves ρ by at most `√ε` in trace distance, and the unnormalized
/// projection `ΠρΠ` sits within `ε + √ε ≤ 2√ε`.
pub fn verify_gentle_measurement(
    rho: &DensityMatrix,
    pi: &Array2<c64>,
) -> Result<VerificationReport> {
    check_projector(pi, rho.dim())?;
    let epsilon = (1.0 - expectation_re(pi, rho.matrix())).clamp(0.0, 1.0);
    let pi_c = identity(rho.dim()) - pi;
    let kept = pi.dot(rho.matrix()).dot(pi);
    let forgotten = &kept + &pi_c.dot(rho.matrix()).dot(&pi_c);
    let d_channel = 0.5 * one_norm_hermitian(&(rho.matrix() - &forgotten))?;
    let d_projected = 0.5 * one_norm_hermitian(&(rho.matrix() - &kept))?;
    let root = epsilon.sqrt();
    let channel_ok = d_channel <= root + EXACT_TOL;
    let mut report = VerificationReport::judged(
        "gentle-measurement",
        ClaimKind::UpperBound,
        epsilon + root,
        d_projected,
        0.0,
        0,
        format!(
            "ε = {epsilon:.3e}; channel distance {d_channel:.3e} {} √ε = {root:.3e}; ε + √ε ≤ 2√ε = {:.3e}",
            if channel_ok { "≤" } else { "EXCEEDS" },
            2.0 * root
        ),
    );
    if !channel_ok {
        report.verdict = Verdict::Violated;
    }
    Ok(report)
}

/// A random gentle-measurement instance: a state mostly supported on a
/// Haar-rotated rank-`r` subspace, leaking weight ≈ `target_epsilon`
/// outside it. Returns the state and the subspace projector.
pub fn random_gentle_instance(
    n: usize,
    rank: usize,
    target_epsilon: f64,
    rng: &mut LabRng,
) -> Result<(DensityMatrix, Array2<c64>)> {
    let dim = checked_dim(n)?;
    if rank == 0 || rank >= dim {
        return Err(Error::InvalidArgument(format!("rank {rank} outside 1..{dim}")));
    }
    if !(0.0..=0.5).contains(&target_epsilon) {
        return Err(Error::InvalidArgument(format!(
            "target epsilon {target_epsilon} outside [0, 1/2]"
        )));
    }
    let basis = crate::hilbert::haar_unitary(n, rng)?;
    let mut pi = Array2::<c64>::zeros((dim, dim));
    for k in 0..rank {
        let col = basis.matrix().column(k);
        for i in 0..dim {
            for j in 0..dim {
                pi[[i, j]] += col[i] * col[j].conj();
            }
        }
    }
    let inside = random_density_in_span(&basis, 0..rank, rng)?;
    let outside = random_density_in_span(&basis, rank..dim, rng)?;
    let rho = DensityMatrix::mixture(&[(1.0 - target_epsilon, inside), (target_epsilon, outside)])?;
    Ok((rho, pi))
}

// ---------------------------------------------------------------------------
// Near-pure structure
// ---------------------------------------------------------------------------

/// Default constant for the product-structure bound, calibrated on the
/// random mixture family before freezing (see the builder below).
pub const DEFAULT_STRUCTURE_CONSTANT: f64 = 8.0;

/// Verify the product-structure claim on a bipartite state whose left
/// marginal is nearly pure: with `ε = 1 − Tr(ρ_A²)`, the state is within
/// `C·ε` in one-norm of `ψ_A ⊗ σ_B`, where `ψ_A` is the closest pure state
/// to the marginal and `σ_B` the state conditioned on it. Outside `ε < 1/4`
/// the bound's regime is left, and the report is Inconclusive.
pub fn verify_purity_structure(
    rho_ab: &DensityMatrix,
    split: &SubsystemSpec,
    constant: f64,
) -> Result<VerificationReport> {
    if split.factors() != 2 || split.total_dim() != rho_ab.dim() {
        return Err(Error::InvalidSubsystem(format!(
            "need a bipartite split matching dimension {}",
            rho_ab.dim()
        )));
    }
    if constant <= 0.0 {
        return Err(Error::InvalidArgument(format!("constant {constant} must be positive")));
    }
    let rho_a = partial_trace(rho_ab, split, &[0])?;
    let epsilon = (1.0 - rho_a.purity()).max(0.0);
    if epsilon >= 0.25 {
        return Ok(VerificationReport::inconclusive(
            "purity-product-structure",
            ClaimKind::UpperBound,
            constant * epsilon,
            f64::NAN,
            format!("ε = {epsilon:.4} ≥ 1/4: marginal too mixed for a meaningful closest pure state"),
        ));
    }
    let closest = closest_pure_state(&rho_a)?;
    if closest.degenerate {
        return Ok(VerificationReport::inconclusive(
            "purity-product-structure",
            ClaimKind::UpperBound,
            constant * epsilon,
            f64::NAN,
            "top eigenvalue of the marginal is degenerate; ψ_A is not unique".to_string(),
        ));
    }
    let (d_a, d_b) = (split.dims()[0], split.dims()[1]);
    let psi = closest.state.amplitudes();
    // σ_B = ⟨ψ_A| ρ_AB |ψ_A⟩, then normalized.
    let mut sigma = Array2::<c64>::zeros((d_b, d_b));
    for i in 0..d_b {
        for j in 0..d_b {
            let mut acc = c64::new(0.0, 0.0);
            for a in 0..d_a {
                for ap in 0..d_a {
                    acc += psi[a].conj() * rho_ab.matrix()[[a * d_b + i, ap * d_b + j]] * psi[ap];
                }
            }
            sigma[[i, j]] = acc;
        }
    }
    let weight: f64 = (0..d_b).map(|i| sigma[[i, i]].re).sum();
    if weight <= 1e-12 {
        return Ok(VerificationReport::inconclusive(
            "purity-product-structure",
            ClaimKind::UpperBound,
            constant * epsilon,
            f64::NAN,
            "ρ_AB carries no weight on ψ_A".to_string(),
        ));
    }
    let sigma_b = DensityMatrix::new(sigma.mapv(|z| z / weight))?;
    let product = DensityMatrix::from_pure(&closest.state).tensor(&sigma_b)?;
    let distance = one_norm_hermitian(&(rho_ab.matrix() - product.matrix()))?;
    Ok(VerificationReport::judged(
        "purity-product-structure",
        ClaimKind::UpperBound,
        constant * epsilon,
        distance,
        0.0,
        0,
        format!("ε = {epsilon:.3e}, C = {constant}, conditional weight {weight:.4}"),
    ))
}

/// A random instance for the product-structure claim: a product state
/// `ψ_A ⊗ σ_B` contaminated by weight `p` of an independent random state.
pub fn noisy_product_instance(
    n_a: usize,
    n_b: usize,
    p: f64,
    rng: &mut LabRng,
) -> Result<(DensityMatrix, SubsystemSpec)> {
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::InvalidArgument(format!("mixing weight {p} outside [0,1]")));
    }
    let psi_a = haar_state(n_a, rng)?.to_density();
    let sigma_b = random_density(n_b, rng)?;
    let clean = psi_a.tensor(&sigma_b)?;
    let noise = random_density(n_a + n_b, rng)?;
    let rho = DensityMatrix::mixture(&[(1.0 - p, clean), (p, noise)])?;
    Ok((rho, SubsystemSpec::from_qubit_parts(&[n_a, n_b])?))
}

/// Verify the gentle-subsystem claim: when the post-measurement reduced
/// state on the left factor is nearly pure — `ε = 1 − Tr(Tr_B(M(ρ))²)` with
/// `M` the outcome-forgetting channel of `{Π, I−Π}` — the measurement barely
/// disturbs that factor: `‖Tr_B(ρ) − Tr_B(M(ρ))‖₁ ≤ ε^{1/4}`. The proof
/// needs `ε ≤ 1/4`; larger ε is Inconclusive, and ε within [0.2, 0.25] is
/// flagged as the regime edge.
pub fn verify_gentle_subsystem(
    rho_ab: &DensityMatrix,
    split: &SubsystemSpec,
    pi: &Array2<c64>,
) -> Result<VerificationReport> {
    if split.factors() != 2 || split.total_dim() != rho_ab.dim() {
        return Err(Error::InvalidSubsystem(format!(
            "need a bipartite split matching dimension {}",
            rho_ab.dim()
        )));
    }
    check_projector(pi, rho_ab.dim())?;
    let pi_c = identity(rho_ab.dim()) - pi;
    let measured = DensityMatrix::new_unchecked(
        pi.dot(rho_ab.matrix()).dot(pi) + pi_c.dot(rho_ab.matrix()).dot(&pi_c),
    );
    let reduced_before = partial_trace(rho_ab, split, &[0])?;
    let reduced_after = partial_trace(&measured, split, &[0])?;
    let epsilon = (1.0 - reduced_after.purity()).max(0.0);
    if epsilon > 0.25 {
        return Ok(VerificationReport::inconclusive(
            "gentle-subsystem",
            ClaimKind::UpperBound,
            epsilon.powf(0.25),
            f64::NAN,
            format!("ε = {epsilon:.4} > 1/4: outside the fourth-root bound's regime"),
        ));
    }
    let distance =
        one_norm_hermitian(&(reduced_before.matrix() - reduced_after.matrix()))?;
    let edge = (0.2..=0.25).contains(&epsilon);
    Ok(VerificationReport::judged(
        "gentle-subsystem",
        ClaimKind::UpperBound,
        epsilon.powf(0.25),
        distance,
        0.0,
        0,
        format!(
            "ε = {epsilon:.3e}{}",
            if edge { "; bound regime edge (proof needs ε ≤ 1/4)" } else { "" }
        ),
    ))
}

/// A gentle-subsystem instance: a pure product state measured against a
/// rank-1 projector tilted off it by weight `delta` inside the left factor.
pub fn gentle_subsystem_instance(
    n_a: usize,
    n_b: usize,
    delta: f64,
    rng: &mut LabRng,
) -> Result<(DensityMatrix, SubsystemSpec, Array2<c64>)> {
    if !(0.0..1.0).contains(&delta) {
        return Err(Error::InvalidArgument(format!("tilt {delta} outside [0,1)")));
    }
    let dim_a = checked_dim(n_a)?;
    if dim_a < 2 {
        return Err(Error::InvalidArgument("left factor needs at least one qubit".into()));
    }
    let u = crate::hilbert::haar_unitary(n_a, rng)?;
    let a0: Array1<c64> = u.matrix().column(0).to_owned();
    let a1: Array1<c64> = u.matrix().column(1).to_owned();
    let v = haar_state(n_b, rng)?;
    let psi = PureState::new(a0.clone())?.tensor(&v)?;
    let tilted = PureState::new(
        &a0.mapv(|z| z * c64::new((1.0 - delta).sqrt(), 0.0))
            + &a1.mapv(|z| z * c64::new(delta.sqrt(), 0.0)),
    )?
    .tensor(&v)?;
    let w = tilted.amplitudes();
    let dim = w.len();
    let mut pi = Array2::<c64>::zeros((dim, dim));
    for i in 0..dim {
        for j in 0..dim {
            pi[[i, j]] = w[i] * w[j].conj();
        }
    }
    Ok((psi.to_density(), SubsystemSpec::from_qubit_parts(&[n_a, n_b])?, pi))
}

// ---------------------------------------------------------------------------
// Cap geometry
// ---------------------------------------------------------------------------

/// Which special case of the separation geometry to check.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum GeometryCase {
    /// A small cap around a fixed pure state: `S = {d_tr ≤ ε}`, blown up to
    /// `T = {d_tr ≤ ε + Δ}`; the shell has measure at least `σ(S)·Δ`.
    NearCap,
    /// The far region `S = {d_tr ≥ 1 − ε}` with `σ(S) ≤ 1/2`, blown up by
    /// `Δ`; the shell has measure at least `Δ`.
    FarCap,
    /// Caps in a two-factor product of state spaces, where the exponents of
    /// the two factors add; shell measure again at least `σ(S)·Δ`.
    ProductCaps,
}

/// Haar measure of the trace-distance cap `{φ : d_tr(ψ, φ) ≤ x}` on `n`
/// qubits: exactly `x^(2(2^n − 1))`.
pub fn cap_measure(n: usize, x: f64) -> f64 {
    if x <= 0.0 {
        0.0
    } else if x >= 1.0 {
        1.0
    } else {
        x.powi(2 * ((1i32 << n) - 1))
    }
}

/// Measure of the product-state cap `{(φ₁, φ₂) : d_tr(ψ₁⊗ψ₂, φ₁⊗φ₂) ≤ x}`
/// with both factors on `n` qubits, by quadrature of the exact overlap
/// density. Its leading exponent in `x` is `2(N₁ + N₂ − 2)`.
pub fn product_cap_measure(n: usize, x: f64) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    if x >= 1.0 {
        return 1.0;
    }
    // d_tr² = 1 − X·Y with X, Y the per-factor squared overlaps, whose
    // complements U = 1−X, V = 1−Y have CDF u^(N−1). The cap is
    // U + V − UV ≤ δ with δ = x²; integrate over U.
    let big_n = (1usize << n) as f64;
    let delta = x * x;
    let f = |u: f64| -> f64 {
        let tail = ((delta - u) / (1.0 - u)).max(0.0).powf(big_n - 1.0);
        if big_n == 2.0 {
            tail
        } else {
            (big_n - 1.0) * u.powf(big_n - 2.0) * tail
        }
    };
    simpson(f, 0.0, delta, 4000)
}

/// Check one case of the cap-blowup geometry: compute the analytic measures
/// of `S`, its `Δ`-enlargement `T`, and the shell `T∖S`; assert the case's
/// lower bound on the shell; and cross-check the shell measure by Monte
/// Carlo in the trace-distance parametrization.
pub fn conjecture_cap_geometry(
    n: usize,
    epsilon: f64,
    delta: f64,
    case: GeometryCase,
    samples: usize,
    rng: &mut LabRng,
) -> Result<VerificationReport> {
    checked_dim(n)?;
    if !(0.0..=1.0).contains(&epsilon) || !(0.0..=1.0).contains(&delta) || epsilon + delta > 1.0 {
        return Err(Error::InvalidArgument(format!(
            "need ε, Δ ≥ 0 with ε + Δ ≤ 1; got ε = {epsilon}, Δ = {delta}"
        )));
    }
    if samples == 0 {
        return Err(Error::InvalidArgument("need at least one sample".into()));
    }

    // Analytic measures and the inner/outer trace-distance radii of the shell.
    let (sigma_s, shell, bound, lo, hi, label) = match case {
        GeometryCase::NearCap => {
            let s = cap_measure(n, epsilon);
            let t = cap_measure(n, epsilon + delta);
            (s, t - s, s * delta, epsilon, epsilon + delta, "σ(S)·Δ")
        }
        GeometryCase::FarCap => {
            let q = 2 * ((1i32 << n) - 1);
            let s = 1.0 - (1.0 - epsilon).powi(q);
            if s > 0.5 {
                return Err(Error::InvalidArgument(format!(
                    "far-cap case needs σ(S) ≤ 1/2; got {s:.4} at ε = {epsilon}"
                )));
            }
            let shell = (1.0 - epsilon).powi(q) - (1.0 - epsilon - delta).powi(q);
            (s, shell, delta, 1.0 - epsilon - delta, 1.0 - epsilon, "Δ")
        }
        GeometryCase::ProductCaps => {
            let s = product_cap_measure(n, epsilon);
            let t = product_cap_measure(n, epsilon + delta);
            (s, t - s, s * delta, epsilon, epsilon + delta, "σ(S)·Δ")
        }
    };
    let geometry_ok = shell >= bound - EXACT_TOL;

    // Monte Carlo estimate of the shell measure. Haar invariance fixes the
    // reference state; only the overlap with one amplitude (per factor) is
    // needed.
    let mut hits = 0usize;
    for _ in 0..samples {
        let overlap_sq = match case {
            GeometryCase::ProductCaps => {
                let x = haar_state(n, rng)?.amplitudes()[0].norm_sqr();
                let y = haar_state(n, rng)?.amplitudes()[0].norm_sqr();
                x * y
            }
            _ => haar_state(n, rng)?.amplitudes()[0].norm_sqr(),
        };
        let d = (1.0 - overlap_sq).max(0.0).sqrt();
        if d > lo && d <= hi {
            hits += 1;
        }
    }
    let estimate = hits as f64 / samples as f64;

    let mut report = VerificationReport::judged(
        match case {
            GeometryCase::NearCap => "cap-geometry-near",
            GeometryCase::FarCap => "cap-geometry-far",
            GeometryCase::ProductCaps => "cap-geometry-product",
        },
        ClaimKind::Equality,
        shell,
        estimate,
        probability_se(shell, estimate, samples),
        samples,
        format!(
            "n = {n}, ε = {epsilon}, Δ = {delta}: σ(S) = {sigma_s:.3e}, shell {} {label} = {bound:.3e}",
            if geometry_ok { "≥" } else { "BELOW" }
        ),
    );
    if !geometry_ok {
        report.verdict = Verdict::Violated;
    }
    Ok(report)
}

// ---------------------------------------------------------------------------
// Lipschitz concentration
// ---------------------------------------------------------------------------

/// Tail bound for the fixed single-query test `g(U) = |⟨0|U|0⟩|²` over Haar
/// unitaries: the empirical `Pr[g ≥ E g + t]` must stay below
/// `exp(−t²(N−2)/(24 m²))` for an `m`-query test.
pub fn verify_lipschitz_tail(
    n: usize,
    queries: usize,
    t: f64,
    samples: usize,
    rng: &mut LabRng,
) -> Result<VerificationReport> {
    let dim = checked_dim(n)?;
    if queries == 0 || samples == 0 {
        return Err(Error::InvalidArgument("need m ≥ 1 and at least one sample".into()));
    }
    if t <= 0.0 {
        return Err(Error::InvalidArgument(format!("threshold shift t = {t} must be positive")));
    }
    let mean_g = 1.0 / dim as f64;
    let mut hits = 0usize;
    for _ in 0..samples {
        // g depends on U only through U|0⟩, a Haar state.
        let g = haar_state(n, rng)?.amplitudes()[0].norm_sqr();
        if g >= mean_g + t {
            hits += 1;
        }
    }
    let estimate = hits as f64 / samples as f64;
    let bound =
        (-(t * t) * (dim as f64 - 2.0) / (24.0 * (queries * queries) as f64)).exp().min(1.0);
    Ok(VerificationReport::judged(
        "lipschitz-tail",
        ClaimKind::UpperBound,
        bound,
        estimate,
        probability_se(bound.min(estimate + 0.1), estimate, samples),
        samples,
        format!("n = {n}, m = {queries}, t = {t}; E g = {mean_g:.4}{}", if bound >= 1.0 { "; bound vacuous" } else { "" }),
    ))
}

// ---------------------------------------------------------------------------
// Default verification grid
// ---------------------------------------------------------------------------

/// Run the default verification grid: every lemma at a representative set of
/// parameters, each cell on its own derived generator, merged in grid order.
/// The same seed reproduces the same reports byte for byte.
pub fn default_grid(seed: u64) -> Result<Vec<VerificationReport>> {
    type Cell = Box<dyn Fn(&mut LabRng) -> Result<VerificationReport> + Sync + Send>;
    let mut cells: Vec<Cell> = Vec::new();

    for n in [2usize, 3, 4] {
        for d in [1usize, 2] {
            cells.push(Box::new(move |rng| verify_haar_projection(n, d, 10_000, rng)));
        }
    }
    for (a, b) in [(1usize, 1usize), (2, 2)] {
        cells.push(Box::new(move |rng| verify_lubkin_purity(a, b, 20_000, rng)));
    }
    for n in [1usize, 2, 3] {
        for eps in [0.25, 0.5, 0.75] {
            cells.push(Box::new(move |rng| verify_concentration_overlap(n, eps, 100_000, rng)));
        }
    }
    for m in [2usize, 3, 4] {
        cells.push(Box::new(move |rng| verify_product_test_haar(m, 10_000, rng)));
    }
    for t in [1usize, 2, 3, 4] {
        cells.push(Box::new(move |rng| {
            let circuit = tilted_measurement_chain(t, 0.02 / (2.0 * t as f64), rng)?;
            verify_measurement_decomposition(&circuit, &PureState::zero(t)?)
        }));
    }
    for eps in [0.0, 0.01, 0.04] {
        cells.push(Box::new(move |rng| {
            let (rho, pi) = random_gentle_instance(3, 2, eps, rng)?;
            verify_gentle_measurement(&rho, &pi)
        }));
    }
    for p in [0.0, 0.01, 0.05] {
        cells.push(Box::new(move |rng| {
            let (rho, split) = noisy_product_instance(2, 2, p, rng)?;
            verify_purity_structure(&rho, &split, DEFAULT_STRUCTURE_CONSTANT)
        }));
    }
    for delta in [1e-4, 1e-2] {
        cells.push(Box::new(move |rng| {
            let (rho, split, pi) = gentle_subsystem_instance(2, 2, delta, rng)?;
            verify_gentle_subsystem(&rho, &split, &pi)
        }));
    }
    for n in [1usize, 2] {
        cells.push(Box::new(move |rng| {
            conjecture_cap_geometry(n, 0.25, 0.25, GeometryCase::NearCap, 100_000, rng)
        }));
    }
    cells.push(Box::new(|rng| {
        conjecture_cap_geometry(1, 0.25, 0.05, GeometryCase::FarCap, 100_000, rng)
    }));
    cells.push(Box::new(|rng| {
        conjecture_cap_geometry(2, 0.05, 0.05, GeometryCase::FarCap, 100_000, rng)
    }));
    cells.push(Box::new(|rng| {
        conjecture_cap_geometry(1, 0.3, 0.3, GeometryCase::ProductCaps, 100_000, rng)
    }));
    for n in [4usize, 6] {
        cells.push(Box::new(move |rng| verify_lipschitz_tail(n, 1, 0.3, 10_000, rng)));
    }

    cells
        .par_iter()
        .enumerate()
        .map(|(i, cell)| cell(&mut LabRng::new(seed, STREAM_VERIFY).substream(i as u64)))
        .collect()
}

// ---------------------------------------------------------------------------
// Shared helpers
// ---------------------------------------------------------------------------

fn checked_dim(n: usize) -> Result<usize> {
    if n == 0 || n > crate::hilbert::MAX_QUBITS {
        return Err(Error::DimensionOverflow { qubits: n, cap: crate::hilbert::MAX_QUBITS });
    }
    Ok(1usize << n)
}

fn identity(dim: usize) -> Array2<c64> {
    Array2::from_diag(&Array1::from_elem(dim, c64::new(1.0, 0.0)))
}

fn expectation_re(op: &Array2<c64>, rho: &Array2<c64>) -> f64 {
    op.dot(rho).diag().iter().map(|z| z.re).sum()
}

/// Validate that `pi` is a Hermitian idempotent of the right dimension.
fn check_projector(pi: &Array2<c64>, dim: usize) -> Result<()> {
    if pi.nrows() != dim || pi.ncols() != dim {
        return Err(Error::DimensionMismatch { expected: dim, got: pi.nrows() });
    }
    let herm_defect = pi
        .indexed_iter()
        .map(|((i, j), z)| (z - pi[[j, i]].conj()).norm())
        .fold(0.0f64, f64::max);
    if herm_defect > 1e-8 {
        return Err(Error::NotHermitian(herm_defect));
    }
    let idem = pi.dot(pi);
    let idem_defect = idem
        .indexed_iter()
        .map(|((i, j), z)| (z - pi[[i, j]]).norm())
        .fold(0.0f64, f64::max);
    if idem_defect > 1e-8 {
        return Err(Error::InvalidArgument(format!(
            "matrix is not idempotent (defect {idem_defect:.2e}); not a projector"
        )));
    }
    Ok(())
}

/// Zero every row and column whose index disagrees with `outcome` on the
/// given qubit: the unnormalized projection `Π_b · M · Π_b`.
fn mask_qubit(mat: &Array2<c64>, n: usize, qubit: usize, outcome: u8) -> Array2<c64> {
    let shift = n - 1 - qubit;
    let dim = mat.nrows();
    let mut out = Array2::<c64>::zeros((dim, dim));
    for i in 0..dim {
        if ((i >> shift) & 1) as u8 != outcome {
            continue;
        }
        for j in 0..dim {
            if ((j >> shift) & 1) as u8 == outcome {
                out[[i, j]] = mat[[i, j]];
            }
        }
    }
    out
}

/// A random full-rank density matrix: a normalized Gaussian square.
pub fn random_density(n: usize, rng: &mut LabRng) -> Result<DensityMatrix> {
    let dim = checked_dim(n)?;
    let mut g = Array2::<c64>::zeros((dim, dim));
    for i in 0..dim {
        for j in 0..dim {
            g[[i, j]] = rng.ginibre();
        }
    }
    let raw = g.dot(&g.mapv(|z| z.conj()).reversed_axes());
    let trace: f64 = raw.diag().iter().map(|z| z.re).sum();
    DensityMatrix::new(raw.mapv(|z| z / trace))
}

/// A random density matrix supported on the span of the listed columns of a
/// unitary.
fn random_density_in_span(
    basis: &UnitaryMatrix,
    cols: std::ops::Range<usize>,
    rng: &mut LabRng,
) -> Result<DensityMatrix> {
    let dim = basis.dim();
    let rank = cols.len();
    let mut amps = Array1::<c64>::zeros(dim);
    let coeffs: Vec<c64> = (0..rank).map(|_| rng.ginibre()).collect();
    for (k, col) in cols.enumerate() {
        for i in 0..dim {
            amps[i] += coeffs[k] * basis.matrix()[[i, col]];
        }
    }
    let norm = amps.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    if norm < 1e-12 {
        return Err(Error::NotNormalized(norm));
    }
    Ok(PureState::new(amps.mapv(|z| z / norm))?.to_density())
}

/// Composite Simpson's rule with `intervals` subintervals (made even).
fn simpson<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, intervals: usize) -> f64 {
    if b <= a {
        return 0.0;
    }
    let n = intervals.max(2) & !1usize;
    let h = (b - a) / n as f64;
    let mut acc = f(a) + f(b);
    for k in 1..n {
        let w = if k % 2 == 1 { 4.0 } else { 2.0 };
        acc += w * f(a + k as f64 * h);
    }
    acc * h / 3.0
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hilbert::{haar_unitary, MAX_QUBITS};
    use approx::assert_abs_diff_eq;
    use ndarray::array;

    fn rng(tag: u64) -> LabRng {
        LabRng::new(0x7e57_0001, tag)
    }

    #[test]
    fn verdict_thresholds_follow_claim_kind() {
        let eq = VerificationReport::judged("x", ClaimKind::Equality, 0.5, 0.5004, 0.0001, 100, String::new());
        assert_eq!(eq.verdict, Verdict::Consistent);
        let eq_bad =
            VerificationReport::judged("x", ClaimKind::Equality, 0.5, 0.501, 0.0001, 100, String::new());
        assert_eq!(eq_bad.verdict, Verdict::Violated);
        // One-sided: an estimate far *below* an upper bound is fine.
        let ub = VerificationReport::judged("x", ClaimKind::UpperBound, 0.5, 0.01, 0.0001, 100, String::new());
        assert_eq!(ub.verdict, Verdict::Consistent);
        let lb = VerificationReport::judged("x", ClaimKind::LowerBound, 0.5, 0.01, 0.0001, 100, String::new());
        assert_eq!(lb.verdict, Verdict::Violated);
        // Exact checks use the numerical tolerance.
        let exact = VerificationReport::judged("x", ClaimKind::UpperBound, 0.1, 0.1 + 1e-12, 0.0, 0, String::new());
        assert_eq!(exact.verdict, Verdict::Consistent);
    }

    #[test]
    fn reports_serialize_and_render() {
        let r = VerificationReport::judged("demo", ClaimKind::Equality, 0.125, 0.127, 0.002, 1000, "n = 2".into());
        let json = serde_json::to_string(&r).unwrap();
        let back: VerificationReport = serde_json::from_str(&json).unwrap();
        assert_eq!(back, r);
        let md = reports_markdown(&[r]);
        assert!(md.contains("| demo |"));
        assert!(md.lines().count() == 3);
    }

    #[test]
    fn haar_projection_matches_rank_fraction() {
        let mut g = rng(1);
        let full = verify_haar_projection(2, 4, 50, &mut g).unwrap();
        assert_eq!(full.verdict, Verdict::Consistent);
        assert_abs_diff_eq!(full.estimate, 1.0, epsilon = 1e-12);

        let r = verify_haar_projection(3, 1, 10_000, &mut g).unwrap();
        assert_eq!(r.verdict, Verdict::Consistent);
        assert_abs_diff_eq!(r.claimed, 1.0 / 8.0);

        let r2 = verify_haar_projection(2, 2, 10_000, &mut g).unwrap();
        assert_eq!(r2.verdict, Verdict::Consistent);
        assert_abs_diff_eq!(r2.claimed, 0.5);

        assert!(verify_haar_projection(2, 5, 10, &mut g).is_err());
    }

    #[test]
    fn lubkin_purity_matches_closed_form() {
        let mut g = rng(15);
        let r = verify_lubkin_purity(1, 1, 8000, &mut g).unwrap();
        assert_abs_diff_eq!(r.claimed, 0.8, epsilon = 1e-12);
        assert_eq!(r.verdict, Verdict::Consistent, "{r}");

        let r22 = verify_lubkin_purity(2, 2, 8000, &mut g).unwrap();
        assert_abs_diff_eq!(r22.claimed, 8.0 / 17.0, epsilon = 1e-12);
        assert_eq!(r22.verdict, Verdict::Consistent, "{r22}");

        assert!(verify_lubkin_purity(0, 1, 10, &mut g).is_err());
    }

    #[test]
    fn overlap_concentration_matches_power_law() {
        let mut g = rng(2);
        let certain = verify_concentration_overlap(2, 1.0, 200, &mut g).unwrap();
        assert_abs_diff_eq!(certain.estimate, 1.0);
        assert_eq!(certain.verdict, Verdict::Consistent);

        let r1 = verify_concentration_overlap(1, 0.5, 20_000, &mut g).unwrap();
        assert_abs_diff_eq!(r1.claimed, 0.5);
        assert_eq!(r1.verdict, Verdict::Consistent);

        let r2 = verify_concentration_overlap(2, 0.5, 20_000, &mut g).unwrap();
        assert_abs_diff_eq!(r2.claimed, 0.125);
        assert_eq!(r2.verdict, Verdict::Consistent);
    }

    #[test]
    fn product_test_haar_means_match_lubkin() {
        let mut g = rng(3);
        let r2 = verify_product_test_haar(2, 4000, &mut g).unwrap();
        assert_abs_diff_eq!(r2.claimed, 0.9, epsilon = 1e-12);
        assert_eq!(r2.verdict, Verdict::Consistent);

        let r4 = verify_product_test_haar(4, 4000, &mut g).unwrap();
        assert_abs_diff_eq!(r4.claimed, 162.0 / 272.0, epsilon = 1e-12);
        assert_eq!(r4.verdict, Verdict::Consistent);
        assert!(r4.claimed < product_test_haar_bound(4));

        // The ceiling at the scale the state-generator analysis leans on.
        assert!(product_test_haar_bound(13) <= 0.05);
    }

    #[test]
    fn measurement_free_circuit_has_zero_gap() {
        let mut g = rng(4);
        let op = haar_unitary(2, &mut g).unwrap();
        let circuit = MeasuredCircuit::new(
            2,
            vec![CircuitStep::Unitary { op, targets: vec![0, 1] }],
        )
        .unwrap();
        let trace = decomposition_trace(&circuit, &PureState::zero(2).unwrap()).unwrap();
        assert_abs_diff_eq!(trace.epsilon, 0.0, epsilon = 1e-10);
        assert_abs_diff_eq!(trace.one_norm_gap, 0.0, epsilon = 1e-10);
        let report = verify_measurement_decomposition(&circuit, &PureState::zero(2).unwrap()).unwrap();
        assert_eq!(report.verdict, Verdict::Consistent);
    }

    #[test]
    fn fair_coin_saturates_the_decomposition_bound() {
        let h = UnitaryMatrix::new(
            array![
                [c64::new(1.0, 0.0), c64::new(1.0, 0.0)],
                [c64::new(1.0, 0.0), c64::new(-1.0, 0.0)],
            ]
            .mapv(|z| z / c64::new(2f64.sqrt(), 0.0)),
        )
        .unwrap();
        let circuit = MeasuredCircuit::new(
            1,
            vec![CircuitStep::Unitary { op: h, targets: vec![0] }, CircuitStep::Measure { qubit: 0 }],
        )
        .unwrap();
        let trace = decomposition_trace(&circuit, &PureState::zero(1).unwrap()).unwrap();
        // The coin leaves a maximally mixed bit: ε = 1/2, and dropping the
        // unchosen branch costs exactly 1/2 in one-norm — the bound is tight.
        assert_abs_diff_eq!(trace.epsilon, 0.5, epsilon = 1e-10);
        assert_abs_diff_eq!(trace.one_norm_gap, 0.5, epsilon = 1e-10);
        assert_abs_diff_eq!(trace.step_probabilities[0], 0.5, epsilon = 1e-10);
        let report = verify_measurement_decomposition(&circuit, &PureState::zero(1).unwrap()).unwrap();
        assert_eq!(report.verdict, Verdict::Consistent);
    }

    #[test]
    fn engineered_chains_stay_within_the_bound() {
        for t in 1..=4usize {
            let mut g = rng(40 + t as u64);
            let circuit = tilted_measurement_chain(t, 0.0025, &mut g).unwrap();
            let trace = decomposition_trace(&circuit, &PureState::zero(t).unwrap()).unwrap();
            assert!(trace.epsilon <= 0.02 + 1e-12, "t = {t}: ε = {}", trace.epsilon);
            let report =
                verify_measurement_decomposition(&circuit, &PureState::zero(t).unwrap()).unwrap();
            assert_eq!(report.verdict, Verdict::Consistent, "t = {t}: {report}");
            assert!(report.estimate <= report.claimed + 1e-9);
        }
    }

    #[test]
    fn masking_agrees_with_the_dephasing_split() {
        // Π₀MΠ₀ + Π₁MΠ₁ must equal the dephasing channel.
        let mut g = rng(5);
        let rho = random_density(2, &mut g).unwrap();
        let dephased = dephase_qubits(&rho, &[1]).unwrap();
        let split = &mask_qubit(rho.matrix(), 2, 1, 0) + &mask_qubit(rho.matrix(), 2, 1, 1);
        let diff = one_norm_hermitian(&(dephased.matrix() - &split)).unwrap();
        assert!(diff <= 1e-10);
    }

    #[test]
    fn gentle_measurement_bounds_hold() {
        let mut g = rng(6);
        // Fully supported inside the projector: both distances vanish.
        let (rho0, pi0) = random_gentle_instance(3, 2, 0.0, &mut g).unwrap();
        let r0 = verify_gentle_measurement(&rho0, &pi0).unwrap();
        assert_eq!(r0.verdict, Verdict::Consistent);
        assert!(r0.estimate <= 1e-8);

        let (rho, pi) = random_gentle_instance(3, 2, 0.04, &mut g).unwrap();
        let r = verify_gentle_measurement(&rho, &pi).unwrap();
        assert_eq!(r.verdict, Verdict::Consistent);
        assert!(r.claimed <= 0.04 + 0.2 + 1e-12);

        // The identity is a projector with ε = 0.
        let full = identity(8);
        let r_id = verify_gentle_measurement(&rho, &full).unwrap();
        assert!(r_id.estimate <= 1e-10);

        // A non-projector is rejected.
        let bad = full.mapv(|z| z * c64::new(0.5, 0.0));
        assert!(verify_gentle_measurement(&rho, &bad).is_err());
    }

    #[test]
    fn purity_structure_on_products_and_mixtures() {
        let mut g = rng(7);
        let (clean, split) = noisy_product_instance(2, 2, 0.0, &mut g).unwrap();
        let r = verify_purity_structure(&clean, &split, DEFAULT_STRUCTURE_CONSTANT).unwrap();
        assert_eq!(r.verdict, Verdict::Consistent);
        assert!(r.estimate <= 1e-8);

        let (noisy, split) = noisy_product_instance(2, 2, 0.01, &mut g).unwrap();
        let r = verify_purity_structure(&noisy, &split, DEFAULT_STRUCTURE_CONSTANT).unwrap();
        assert_eq!(r.verdict, Verdict::Consistent, "{r}");
    }

    #[test]
    fn bell_state_is_inconclusive_for_structure() {
        let amps = Array1::from_vec(vec![
            c64::new(std::f64::consts::FRAC_1_SQRT_2, 0.0),
            c64::new(0.0, 0.0),
            c64::new(0.0, 0.0),
            c64::new(std::f64::consts::FRAC_1_SQRT_2, 0.0),
        ]);
        let bell = PureState::new(amps).unwrap().to_density();
        let split = SubsystemSpec::from_qubit_parts(&[1, 1]).unwrap();
        let r = verify_purity_structure(&bell, &split, DEFAULT_STRUCTURE_CONSTANT).unwrap();
        assert_eq!(r.verdict, Verdict::Inconclusive);
    }

    #[test]
    fn gentle_subsystem_engineered_instances() {
        let mut g = rng(8);
        let (rho, split, pi) = gentle_subsystem_instance(2, 2, 1e-4, &mut g).unwrap();
        let r = verify_gentle_subsystem(&rho, &split, &pi).unwrap();
        assert_eq!(r.verdict, Verdict::Consistent, "{r}");
        assert!(r.claimed <= 0.2, "ε^(1/4) = {} unexpectedly large", r.claimed);

        // The trivial measurement never disturbs anything.
        let full = identity(rho.dim());
        let r_id = verify_gentle_subsystem(&rho, &split, &full).unwrap();
        assert!(r_id.estimate <= 1e-10);
    }

    #[test]
    fn gentle_subsystem_flags_the_regime_edge() {
        // Scan the tilt until the post-measurement impurity lands in the
        // [0.2, 0.25] band the proof barely covers, then check the flag.
        let mut found = false;
        for k in 1..200 {
            let delta = 0.4 * k as f64 / 200.0;
            let mut g = rng(9);
            let (rho, split, pi) = gentle_subsystem_instance(2, 2, delta, &mut g).unwrap();
            let r = verify_gentle_subsystem(&rho, &split, &pi).unwrap();
            if r.verdict == Verdict::Inconclusive {
                continue;
            }
            if r.note.contains("regime edge") {
                assert_eq!(r.verdict, Verdict::Consistent, "{r}");
                found = true;
                break;
            }
        }
        assert!(found, "no tilt landed in the regime-edge band");
    }

    #[test]
    fn near_cap_geometry_closed_forms() {
        // n = 1, ε = 0.3, Δ = 0.05: shell = 0.35² − 0.3² = 0.0325 ≥ 0.0045.
        let mut g = rng(10);
        let r =
            conjecture_cap_geometry(1, 0.3, 0.05, GeometryCase::NearCap, 50_000, &mut g).unwrap();
        assert_abs_diff_eq!(r.claimed, 0.0325, epsilon = 1e-12);
        assert_eq!(r.verdict, Verdict::Consistent, "{r}");

        // Δ = 0 leaves an empty shell.
        let r0 = conjecture_cap_geometry(1, 0.3, 0.0, GeometryCase::NearCap, 100, &mut g).unwrap();
        assert_abs_diff_eq!(r0.claimed, 0.0, epsilon = 1e-15);
        assert_eq!(r0.verdict, Verdict::Consistent);
    }

    #[test]
    fn far_cap_geometry_and_its_regime_check() {
        let mut g = rng(11);
        let r =
            conjecture_cap_geometry(1, 0.25, 0.05, GeometryCase::FarCap, 50_000, &mut g).unwrap();
        // Shell = 0.75² − 0.70² = 0.0725 ≥ Δ = 0.05.
        assert_abs_diff_eq!(r.claimed, 0.0725, epsilon = 1e-12);
        assert_eq!(r.verdict, Verdict::Consistent, "{r}");

        // σ(S) > 1/2 is outside the derivation.
        assert!(conjecture_cap_geometry(1, 0.5, 0.1, GeometryCase::FarCap, 100, &mut g).is_err());
        assert!(conjecture_cap_geometry(2, 0.25, 0.1, GeometryCase::FarCap, 100, &mut g).is_err());
    }

    #[test]
    fn product_cap_quadrature_matches_closed_form() {
        // For single-qubit factors the cap measure integrates in closed
        // form: σ(x) = δ + (1−δ)·ln(1−δ) with δ = x².
        for x in [0.2f64, 0.4, 0.6] {
            let delta = x * x;
            let exact = delta + (1.0 - delta) * (1.0 - delta).ln();
            assert_abs_diff_eq!(product_cap_measure(1, x), exact, epsilon = 1e-9);
        }
        assert_abs_diff_eq!(product_cap_measure(1, 0.0), 0.0);
        assert_abs_diff_eq!(product_cap_measure(1, 1.0), 1.0);
    }

    #[test]
    fn product_cap_geometry_consistent_with_sampling() {
        let mut g = rng(12);
        let r = conjecture_cap_geometry(1, 0.3, 0.3, GeometryCase::ProductCaps, 50_000, &mut g)
            .unwrap();
        assert_eq!(r.verdict, Verdict::Consistent, "{r}");
    }

    #[test]
    fn lipschitz_tail_respects_the_bound() {
        let mut g = rng(13);
        let r = verify_lipschitz_tail(4, 1, 0.3, 4000, &mut g).unwrap();
        assert_eq!(r.verdict, Verdict::Consistent, "{r}");

        let r6 = verify_lipschitz_tail(6, 1, 0.3, 4000, &mut g).unwrap();
        assert_eq!(r6.verdict, Verdict::Consistent, "{r6}");
        assert!(r6.claimed < 1.0, "bound should be nontrivial at n = 6");

        // A shift past the maximum leaves an empty tail.
        let r_far = verify_lipschitz_tail(2, 1, 0.9, 500, &mut g).unwrap();
        assert_abs_diff_eq!(r_far.estimate, 0.0);
        assert_eq!(r_far.verdict, Verdict::Consistent);
    }

    #[test]
    fn default_grid_is_deterministic_and_quiet() {
        let a = default_grid(0xfeed).unwrap();
        let b = default_grid(0xfeed).unwrap();
        assert_eq!(serde_json::to_string(&a).unwrap(), serde_json::to_string(&b).unwrap());
        for report in &a {
            assert_ne!(report.verdict, Verdict::Violated, "{report}");
        }
        assert!(a.len() >= 25, "grid unexpectedly small: {}", a.len());
    }

    #[test]
    fn dimension_guards_are_enforced() {
        let mut g = rng(14);
        assert!(verify_haar_projection(MAX_QUBITS + 1, 1, 10, &mut g).is_err());
        assert!(verify_concentration_overlap(2, 1.5, 10, &mut g).is_err());
        assert!(verify_lipschitz_tail(2, 0, 0.1, 10, &mut g).is_err());
        assert!(conjecture_cap_geometry(1, 0.9, 0.2, GeometryCase::NearCap, 10, &mut g).is_err());
    }
}
