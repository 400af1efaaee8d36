//! Constructions under test: a function-like state generator built on the
//! seeded oracle, keyed no-ancilla unitary candidates, quasi-pure state
//! generator candidates, and the distinguishing-game harness their security
//! claims are measured in.
//!
//! Candidates are plain data: per-key unitaries and query strings are derived
//! deterministically from `(candidate seed, key, layer index)` via
//! [`LabRng`] substreams, so a candidate serialized to JSON replays
//! identically anywhere. The stream constants below are part of that replay
//! contract.

use std::cell::{Cell, RefCell};
use std::collections::HashMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bits::BitString;
use crate::error::{Error, Result};
use crate::hilbert::{
    apply_on_qubits_vec, embed_on_qubits, haar_state, haar_unitary, measure_qubits,
    measure_qubits_pure, projector_expectation_bits, trace_out_qubits, DensityMatrix, PureState,
    UnitaryMatrix, MAX_QUBITS,
};
use crate::oracle::{swap_unitary, ChfsInstance};
use crate::rng::LabRng;

/// Stream ids segregating the derived randomness of each construction.
/// Changing any of these changes every candidate's identity.
const STREAM_PRU_UNITARY: u64 = 0x7072_7531;
const STREAM_PRU_QUERY: u64 = 0x7072_7532;
const STREAM_PRSG_UNITARY: u64 = 0x7073_6731;
const STREAM_PRSG_QUERY: u64 = 0x7073_6732;
const STREAM_IDEAL_ORACLE: u64 = 0x6964_6561;

/// Acceptance threshold of the key-guess adversary: guess `k′` fits when
/// the challenge state has squared overlap ≥ θ with the guess's reference
/// state. High enough that distinct reference states can never both fit,
/// which is what makes the brute-force game exactly computable.
const KEY_GUESS_THETA: f64 = 0.9;

// ---------------------------------------------------------------------------
// Function-like state generator
// ---------------------------------------------------------------------------

/// Parameters of the keyed state generator `Gen(k, x) = |φ_{k‖x}⟩`.
#[derive(Debug)]
pub struct PrfsgParams {
    key_bits: usize,
    input_bits: usize,
    oracle: ChfsInstance,
}

impl PrfsgParams {
    pub fn new(key_bits: usize, input_bits: usize, oracle: ChfsInstance) -> Result<Self> {
        if key_bits == 0 {
            return Err(Error::InvalidArgument("key must have at least one bit".into()));
        }
        let total = key_bits + input_bits;
        if total > 64 {
            return Err(Error::InvalidArgument(format!(
                "key + input length {total} exceeds the 64-bit query cap"
            )));
        }
        let out = oracle.output_qubits(total);
        if out > MAX_QUBITS {
            return Err(Error::DimensionOverflow { qubits: out, cap: MAX_QUBITS });
        }
        Ok(PrfsgParams { key_bits, input_bits, oracle })
    }

    pub fn key_bits(&self) -> usize {
        self.key_bits
    }

    pub fn input_bits(&self) -> usize {
        self.input_bits
    }

    pub fn oracle(&self) -> &ChfsInstance {
        &self.oracle
    }

    /// Number of qubits in every generated state: ℓ(κ + m).
    pub fn output_qubits(&self) -> usize {
        self.oracle.output_qubits(self.key_bits + self.input_bits)
    }
}

/// The generator: one oracle query on the concatenated key‖input register,
/// key register discarded.
pub fn prfsg_gen(params: &PrfsgParams, k: &BitString, x: &BitString) -> Result<PureState> {
    if k.len() != params.key_bits {
        return Err(Error::InvalidArgument(format!(
            "key length {} ≠ κ = {}",
            k.len(),
            params.key_bits
        )));
    }
    if x.len() != params.input_bits {
        return Err(Error::InvalidArgument(format!(
            "input length {} ≠ m = {}",
            x.len(),
            params.input_bits
        )));
    }
    params.oracle.oracle_state(&k.concat(x))
}

// ---------------------------------------------------------------------------
// Keyed unitary candidates (no ancilla)
// ---------------------------------------------------------------------------

/// One layer of a keyed circuit candidate. Every layer acts on exactly the
/// candidate's `n_qubits` — the type has no ancilla field on purpose.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub enum PruLayer {
    /// Per-key Haar unitary derived from `(seed, key, layer index)`.
    Scramble { seed: u64 },
    /// Oracle query `S_x` with a per-key `x` of the given length, derived
    /// from `(seed, key, layer index)`.
    OracleQuery { seed: u64, len: usize },
    /// Oracle query with the same `x` for every key.
    FixedQuery { x: BitString },
    /// Adaptive query: measure the leading `bits` qubits and use the outcome
    /// as the query string. Makes the candidate a genuine channel.
    AdaptiveQuery { bits: usize },
    /// Depolarizing slack `ρ ↦ (1−s)ρ + s·I/2ⁿ`, for candidates that stray
    /// from unitarity.
    Depolarize { strength: f64 },
}

/// A keyed family `G_k = L_T ∘ … ∘ L_0` of circuits on `n_qubits`, with no
/// ancillary register: oracle queries are in-place reflections.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct PruCandidate {
    pub key_bits: usize,
    pub n_qubits: usize,
    pub layers: Vec<PruLayer>,
}

impl PruCandidate {
    pub fn new(key_bits: usize, n_qubits: usize, layers: Vec<PruLayer>) -> Result<Self> {
        if key_bits == 0 || key_bits > 16 {
            return Err(Error::InvalidArgument(format!("key_bits {key_bits} outside 1..=16")));
        }
        crate::hilbert::ensure_qubits(n_qubits)?;
        for layer in &layers {
            match layer {
                PruLayer::AdaptiveQuery { bits } => {
                    if *bits == 0 || *bits > n_qubits {
                        return Err(Error::InvalidArgument(format!(
                            "adaptive query reads {bits} bits on {n_qubits} qubits"
                        )));
                    }
                }
                PruLayer::Depolarize { strength } => {
                    if !(0.0..=1.0).contains(strength) {
                        return Err(Error::InvalidArgument(format!(
                            "depolarizing strength {strength} outside [0,1]"
                        )));
                    }
                }
                PruLayer::OracleQuery { len: 0, .. } => {
                    return Err(Error::InvalidQuery("zero-length query string".into()));
                }
                _ => {}
            }
        }
        Ok(PruCandidate { key_bits, n_qubits, layers })
    }
}

/// Per-(seed, key, layer) generator; the derivation ignores how much the
/// caller's generators have already drawn.
fn layer_rng(seed: u64, stream: u64, k: &BitString, layer: usize) -> LabRng {
    LabRng::new(seed, stream).substream(k.digest64()).substream(layer as u64)
}

fn pru_query_string(seed: u64, len: usize, k: &BitString, layer: usize) -> BitString {
    BitString::random(len, &mut layer_rng(seed, STREAM_PRU_QUERY, k, layer))
}

fn check_key(c_bits: usize, k: &BitString) -> Result<()> {
    if k.len() != c_bits {
        return Err(Error::InvalidArgument(format!(
            "key length {} ≠ candidate key_bits {}",
            k.len(),
            c_bits
        )));
    }
    Ok(())
}

/// Resolve a query layer's swap unitary and check it fills the register
/// exactly — the no-ancilla contract.
fn resolved_swap(
    oracle: &ChfsInstance,
    x: &BitString,
    n_qubits: usize,
) -> Result<UnitaryMatrix> {
    let s = swap_unitary(oracle, x)?;
    if s.qubits() != n_qubits {
        return Err(Error::DimensionMismatch {
            expected: 1usize << n_qubits,
            got: 1usize << s.qubits(),
        });
    }
    Ok(s.unitary().clone())
}

/// Apply the keyed circuit `G_k` to ρ, resolving oracle queries against the
/// given instance. Trace-preserving; purity-preserving when no layer
/// measures or depolarizes.
pub fn pru_apply(
    c: &PruCandidate,
    oracle: &ChfsInstance,
    k: &BitString,
    rho: &DensityMatrix,
) -> Result<DensityMatrix> {
    check_key(c.key_bits, k)?;
    if rho.qubits() != c.n_qubits {
        return Err(Error::DimensionMismatch {
            expected: 1usize << c.n_qubits,
            got: rho.dim(),
        });
    }
    let mut state = rho.clone();
    for (i, layer) in c.layers.iter().enumerate() {
        state = match layer {
            PruLayer::Scramble { seed } => {
                let u = haar_unitary(
                    c.n_qubits,
                    &mut layer_rng(*seed, STREAM_PRU_UNITARY, k, i),
                )?;
                u.conjugate(&state)?
            }
            PruLayer::OracleQuery { seed, len } => {
                let x = pru_query_string(*seed, *len, k, i);
                resolved_swap(oracle, &x, c.n_qubits)?.conjugate(&state)?
            }
            PruLayer::FixedQuery { x } => {
                resolved_swap(oracle, x, c.n_qubits)?.conjugate(&state)?
            }
            PruLayer::AdaptiveQuery { bits } => {
                let targets: Vec<usize> = (0..*bits).collect();
                let branches = measure_qubits(&state, &targets)?;
                let mut parts = Vec::with_capacity(branches.len());
                let total: f64 = branches.iter().map(|b| b.probability).sum();
                for b in branches {
                    let x = BitString::from_value(b.outcome, *bits)?;
                    let moved = resolved_swap(oracle, &x, c.n_qubits)?.conjugate(&b.state)?;
                    parts.push((b.probability / total, moved));
                }
                DensityMatrix::mixture(&parts)?
            }
            PruLayer::Depolarize { strength } => DensityMatrix::mixture(&[
                (1.0 - strength, state),
                (*strength, DensityMatrix::maximally_mixed(c.n_qubits)?),
            ])?,
        };
    }
    Ok(state)
}

/// Apply the keyed circuit with every query layer resolved through a
/// caller-supplied substitution: the resolver receives the query string the
/// layer would issue and returns the unitary standing in for it, or `None`
/// to omit the query entirely. Substitution presumes the query strings are
/// key-determined, so adaptive layers are rejected.
pub fn pru_apply_with<F>(
    c: &PruCandidate,
    k: &BitString,
    rho: &DensityMatrix,
    mut resolve: F,
) -> Result<DensityMatrix>
where
    F: FnMut(&BitString) -> Result<Option<UnitaryMatrix>>,
{
    check_key(c.key_bits, k)?;
    if rho.qubits() != c.n_qubits {
        return Err(Error::DimensionMismatch {
            expected: 1usize << c.n_qubits,
            got: rho.dim(),
        });
    }
    let mut state = rho.clone();
    for (i, layer) in c.layers.iter().enumerate() {
        state = match layer {
            PruLayer::Scramble { seed } => {
                let u = haar_unitary(
                    c.n_qubits,
                    &mut layer_rng(*seed, STREAM_PRU_UNITARY, k, i),
                )?;
                u.conjugate(&state)?
            }
            PruLayer::OracleQuery { seed, len } => {
                let x = pru_query_string(*seed, *len, k, i);
                match resolve_one(&mut resolve, &x, c.n_qubits)? {
                    Some(u) => u.conjugate(&state)?,
                    None => state,
                }
            }
            PruLayer::FixedQuery { x } => match resolve_one(&mut resolve, x, c.n_qubits)? {
                Some(u) => u.conjugate(&state)?,
                None => state,
            },
            PruLayer::AdaptiveQuery { .. } => {
                return Err(Error::InvalidArgument(
                    "adaptive candidate: query substitution needs key-determined strings"
                        .into(),
                ));
            }
            PruLayer::Depolarize { strength } => DensityMatrix::mixture(&[
                (1.0 - strength, state),
                (*strength, DensityMatrix::maximally_mixed(c.n_qubits)?),
            ])?,
        };
    }
    Ok(state)
}

fn resolve_one<F>(resolve: &mut F, x: &BitString, n_qubits: usize) -> Result<Option<UnitaryMatrix>>
where
    F: FnMut(&BitString) -> Result<Option<UnitaryMatrix>>,
{
    match resolve(x)? {
        Some(u) if u.qubits() != n_qubits => Err(Error::DimensionMismatch {
            expected: 1usize << n_qubits,
            got: u.dim(),
        }),
        other => Ok(other),
    }
}

/// The unitary part `Ũ_k` of a candidate: the composition of its scramble
/// layers alone, oracle queries omitted. This is the comparison circuit in
/// the long-query hybrid argument. Errors if the candidate contains layers
/// with no unitary part (adaptive queries, depolarizing slack).
pub fn pru_unitary_part(c: &PruCandidate, k: &BitString) -> Result<UnitaryMatrix> {
    check_key(c.key_bits, k)?;
    let mut acc = UnitaryMatrix::identity(c.n_qubits)?;
    for (i, layer) in c.layers.iter().enumerate() {
        match layer {
            PruLayer::Scramble { seed } => {
                let u = haar_unitary(
                    c.n_qubits,
                    &mut layer_rng(*seed, STREAM_PRU_UNITARY, k, i),
                )?;
                acc = u.compose(&acc)?;
            }
            PruLayer::OracleQuery { .. } | PruLayer::FixedQuery { .. } => {}
            other => {
                return Err(Error::InvalidArgument(format!(
                    "candidate layer {other:?} has no unitary part"
                )));
            }
        }
    }
    Ok(acc)
}

/// The per-key query strings a candidate issues, in layer order. Only
/// defined for non-adaptive candidates.
pub fn pru_query_strings(c: &PruCandidate, k: &BitString) -> Result<Vec<BitString>> {
    check_key(c.key_bits, k)?;
    let mut out = Vec::new();
    for (i, layer) in c.layers.iter().enumerate() {
        match layer {
            PruLayer::OracleQuery { seed, len } => out.push(pru_query_string(*seed, *len, k, i)),
            PruLayer::FixedQuery { x } => out.push(x.clone()),
            PruLayer::AdaptiveQuery { .. } => {
                return Err(Error::InvalidArgument(
                    "adaptive candidate: query strings depend on measurement outcomes".into(),
                ));
            }
            _ => {}
        }
    }
    Ok(out)
}

// ---------------------------------------------------------------------------
// Quasi-pure state generator candidates
// ---------------------------------------------------------------------------

/// One step of a state-generator circuit on the `d + u`-qubit workspace
/// (output register first, ancilla last).
#[derive(Clone, Debug, Serialize, Deserialize)]
pub enum PrsgStep {
    /// Per-key Haar unitary on the listed workspace qubits.
    Scramble { seed: u64, targets: Vec<usize> },
    /// Oracle query writing `|φ_x⟩` onto the listed qubits, which must be
    /// in `|0…0⟩` on every branch. `x` has the given length and is derived
    /// from `(seed, key, step index, measurement history)` — adaptive as
    /// soon as a measurement precedes it.
    OracleWrite { seed: u64, len: usize, targets: Vec<usize> },
    /// Oracle write with a fixed query string.
    FixedWrite { x: BitString, targets: Vec<usize> },
    /// Binary computational-basis measurement of one workspace qubit; the
    /// outcome joins the branch history.
    Measure { qubit: usize },
}

/// A keyed state-generator candidate: starting from `|0⟩^{d+u}`, run the
/// steps, then trace out the ancilla. `quasi_pure` declares that the
/// ancilla returns to `|0⟩^u` before trace-out; the declaration is verified
/// on every run, not assumed.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct PrsgCandidate {
    pub key_bits: usize,
    pub output_qubits: usize,
    pub ancilla_qubits: usize,
    pub quasi_pure: bool,
    /// Minimum ancilla reset fidelity a quasi-pure candidate must achieve.
    pub reset_fidelity_threshold: f64,
    pub steps: Vec<PrsgStep>,
}

impl PrsgCandidate {
    pub fn new(
        key_bits: usize,
        output_qubits: usize,
        ancilla_qubits: usize,
        quasi_pure: bool,
        steps: Vec<PrsgStep>,
    ) -> Result<Self> {
        if key_bits == 0 || key_bits > 16 {
            return Err(Error::InvalidArgument(format!("key_bits {key_bits} outside 1..=16")));
        }
        if output_qubits == 0 {
            return Err(Error::InvalidArgument("output register is empty".into()));
        }
        let total = output_qubits + ancilla_qubits;
        crate::hilbert::ensure_qubits(total)?;
        for step in &steps {
            let targets: &[usize] = match step {
                PrsgStep::Scramble { targets, .. } => targets,
                PrsgStep::OracleWrite { targets, len, .. } => {
                    if *len == 0 {
                        return Err(Error::InvalidQuery("zero-length query string".into()));
                    }
                    targets
                }
                PrsgStep::FixedWrite { targets, .. } => targets,
                PrsgStep::Measure { qubit } => std::slice::from_ref(qubit),
            };
            if targets.is_empty() {
                return Err(Error::InvalidSubsystem("step with empty target list".into()));
            }
            let mut seen = vec![false; total];
            for &t in targets {
                if t >= total {
                    return Err(Error::InvalidSubsystem(format!(
                        "target qubit {t} outside workspace of {total}"
                    )));
                }
                if std::mem::replace(&mut seen[t], true) {
                    return Err(Error::InvalidSubsystem(format!("duplicate target qubit {t}")));
                }
            }
        }
        Ok(PrsgCandidate {
            key_bits,
            output_qubits,
            ancilla_qubits,
            quasi_pure,
            reset_fidelity_threshold: 1.0 - 1e-9,
            steps,
        })
    }

    pub fn workspace_qubits(&self) -> usize {
        self.output_qubits + self.ancilla_qubits
    }

    fn ancilla_targets(&self) -> Vec<usize> {
        (self.output_qubits..self.workspace_qubits()).collect()
    }
}

/// Exact marginal distribution of one measurement step.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MeasurementRecord {
    /// Index of the `Measure` step in the candidate's step list.
    pub step: usize,
    /// Probability of outcome 1, marginalized over all branches.
    pub prob_one: f64,
}

/// Everything one generator run produces: the output state, the pre-trace
/// workspace state, the exact measurement marginals, and how well the
/// ancilla was reset.
#[derive(Clone, Debug)]
pub struct PrsgRun {
    /// The `d`-qubit output after ancilla trace-out — the exact channel
    /// output, mixtures over measurement branches included.
    pub output: DensityMatrix,
    /// The full `d+u`-qubit state just before trace-out.
    pub pre_trace: DensityMatrix,
    pub measurement_log: Vec<MeasurementRecord>,
    /// `⟨0^u| Tr_output(pre_trace) |0^u⟩`; 1 when there is no ancilla.
    pub ancilla_reset_fidelity: f64,
}

fn history_digest(history: &[bool]) -> u64 {
    let bits: Vec<u8> = history.iter().map(|&b| b as u8).collect();
    BitString::from_bits(&bits).map(|s| s.digest64()).unwrap_or(0)
}

fn prsg_query_string(
    seed: u64,
    len: usize,
    k: &BitString,
    step: usize,
    history: &[bool],
) -> BitString {
    let mut rng = LabRng::new(seed, STREAM_PRSG_QUERY)
        .substream(k.digest64())
        .substream(step as u64)
        .substream(history_digest(history));
    BitString::random(len, &mut rng)
}

/// Weight of the component where any of the listed qubits is outside |0⟩.
fn nonzero_target_weight(psi: &PureState, targets: &[usize]) -> f64 {
    let n = psi.qubits();
    let mask: usize = targets.iter().map(|&t| 1usize << (n - 1 - t)).sum();
    psi.amplitudes()
        .iter()
        .enumerate()
        .filter(|(idx, _)| idx & mask != 0)
        .map(|(_, a)| a.norm_sqr())
        .sum()
}

/// Run the keyed generator exactly: all measurement branches are carried
/// symbolically and the output is their weighted mixture, not a sample.
pub fn prsg_gen(c: &PrsgCandidate, oracle: &ChfsInstance, k: &BitString) -> Result<PrsgRun> {
    check_key(c.key_bits, k)?;
    let total = c.workspace_qubits();
    let mut branches: Vec<(f64, PureState, Vec<bool>)> =
        vec![(1.0, PureState::zero(total)?, Vec::new())];
    let mut log = Vec::new();

    for (i, step) in c.steps.iter().enumerate() {
        match step {
            PrsgStep::Scramble { seed, targets } => {
                let u = haar_unitary(
                    targets.len(),
                    &mut layer_rng(*seed, STREAM_PRSG_UNITARY, k, i),
                )?;
                for (_, psi, _) in branches.iter_mut() {
                    *psi = apply_on_qubits_vec(&u, targets, psi)?;
                }
            }
            PrsgStep::OracleWrite { seed, len, targets } => {
                for (_, psi, history) in branches.iter_mut() {
                    let x = prsg_query_string(*seed, *len, k, i, history);
                    *psi = oracle_write(oracle, &x, targets, psi)?;
                }
            }
            PrsgStep::FixedWrite { x, targets } => {
                for (_, psi, _) in branches.iter_mut() {
                    *psi = oracle_write(oracle, x, targets, psi)?;
                }
            }
            PrsgStep::Measure { qubit } => {
                let mut next = Vec::with_capacity(branches.len() * 2);
                let mut prob_one = 0.0;
                for (w, psi, history) in branches.into_iter() {
                    for b in measure_qubits_pure(&psi, &[*qubit])? {
                        let mut h = history.clone();
                        h.push(b.outcome == 1);
                        if b.outcome == 1 {
                            prob_one += w * b.probability;
                        }
                        next.push((w * b.probability, b.state, h));
                    }
                }
                branches = next;
                log.push(MeasurementRecord { step: i, prob_one });
            }
        }
    }

    // Branches below the measurement cutoff were dropped; renormalize the
    // surviving weights before mixing.
    let total_weight: f64 = branches.iter().map(|(w, _, _)| w).sum();
    let parts: Vec<(f64, DensityMatrix)> = branches
        .iter()
        .map(|(w, psi, _)| (w / total_weight, psi.to_density()))
        .collect();
    let pre_trace = DensityMatrix::mixture(&parts)?;

    let ancilla = c.ancilla_targets();
    let ancilla_reset_fidelity = if ancilla.is_empty() {
        1.0
    } else {
        projector_expectation_bits(&pre_trace, &ancilla, 0)?
    };
    if c.quasi_pure && ancilla_reset_fidelity < c.reset_fidelity_threshold {
        return Err(Error::QuasiPureViolation {
            fidelity: ancilla_reset_fidelity,
            threshold: c.reset_fidelity_threshold,
        });
    }
    let output = if ancilla.is_empty() {
        pre_trace.clone()
    } else {
        trace_out_qubits(&pre_trace, &ancilla)?
    };
    Ok(PrsgRun { output, pre_trace, measurement_log: log, ancilla_reset_fidelity })
}

fn oracle_write(
    oracle: &ChfsInstance,
    x: &BitString,
    targets: &[usize],
    psi: &PureState,
) -> Result<PureState> {
    let phi = oracle.oracle_state(x)?;
    if phi.qubits() != targets.len() {
        return Err(Error::DimensionMismatch {
            expected: 1usize << targets.len(),
            got: phi.dim(),
        });
    }
    let leak = nonzero_target_weight(psi, targets);
    if leak > 1e-9 {
        return Err(Error::InvalidQuery(format!(
            "oracle write target register is not |0…0⟩ (weight {leak:.3e} outside)"
        )));
    }
    apply_on_qubits_vec(&UnitaryMatrix::preparing(&phi)?, targets, psi)
}

/// The unitary part `Ũ_k` of a generator candidate, as a full workspace
/// unitary: its scramble steps composed in order, queries and measurements
/// omitted.
pub fn prsg_unitary_part(c: &PrsgCandidate, k: &BitString) -> Result<UnitaryMatrix> {
    check_key(c.key_bits, k)?;
    let total = c.workspace_qubits();
    let mut acc = UnitaryMatrix::identity(total)?;
    for (i, step) in c.steps.iter().enumerate() {
        if let PrsgStep::Scramble { seed, targets } = step {
            let u = haar_unitary(
                targets.len(),
                &mut layer_rng(*seed, STREAM_PRSG_UNITARY, k, i),
            )?;
            acc = embed_on_qubits(&u, targets, total)?.compose(&acc)?;
        }
    }
    Ok(acc)
}

/// The query strings a non-adaptive candidate issues for key `k`, in step
/// order, together with their target qubit lists. Errors when a measurement
/// precedes any write, since the strings would then depend on outcomes.
pub fn prsg_query_strings(
    c: &PrsgCandidate,
    k: &BitString,
) -> Result<Vec<(BitString, Vec<usize>)>> {
    check_key(c.key_bits, k)?;
    let mut seen_measure = false;
    let mut out = Vec::new();
    for (i, step) in c.steps.iter().enumerate() {
        match step {
            PrsgStep::Measure { .. } => seen_measure = true,
            PrsgStep::OracleWrite { seed, len, targets } => {
                if seen_measure {
                    return Err(Error::InvalidArgument(
                        "adaptive candidate: query strings depend on measurement outcomes"
                            .into(),
                    ));
                }
                out.push((prsg_query_string(*seed, *len, k, i, &[]), targets.clone()));
            }
            PrsgStep::FixedWrite { x, targets } => {
                if seen_measure {
                    return Err(Error::InvalidArgument(
                        "adaptive candidate: query strings depend on measurement outcomes"
                            .into(),
                    ));
                }
                out.push((x.clone(), targets.clone()));
            }
            PrsgStep::Scramble { .. } => {}
        }
    }
    Ok(out)
}

/// The query strings a candidate issues for key `k` along one fixed
/// measurement-outcome path, in step order with their targets. `history`
/// supplies one outcome per `Measure` step, in order, and must match the
/// candidate's measurement count exactly. Agrees with `prsg_query_strings`
/// when no measurement precedes a write.
pub fn prsg_query_strings_for_history(
    c: &PrsgCandidate,
    k: &BitString,
    history: &[bool],
) -> Result<Vec<(BitString, Vec<usize>)>> {
    check_key(c.key_bits, k)?;
    let mut prefix: Vec<bool> = Vec::new();
    let mut out = Vec::new();
    for (i, step) in c.steps.iter().enumerate() {
        match step {
            PrsgStep::Measure { .. } => {
                let Some(&b) = history.get(prefix.len()) else {
                    return Err(Error::InvalidArgument(format!(
                        "history has {} outcomes but the candidate measures more",
                        history.len()
                    )));
                };
                prefix.push(b);
            }
            PrsgStep::OracleWrite { seed, len, targets } => {
                out.push((prsg_query_string(*seed, *len, k, i, &prefix), targets.clone()));
            }
            PrsgStep::FixedWrite { x, targets } => out.push((x.clone(), targets.clone())),
            PrsgStep::Scramble { .. } => {}
        }
    }
    if prefix.len() != history.len() {
        return Err(Error::InvalidArgument(format!(
            "history has {} outcomes but the candidate measures {}",
            history.len(),
            prefix.len()
        )));
    }
    Ok(out)
}

// ---------------------------------------------------------------------------
// Distinguishing games
// ---------------------------------------------------------------------------

/// Outcome of a two-arm distinguishing experiment.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GameResult {
    pub trials: usize,
    pub real_accept_rate: f64,
    pub ideal_accept_rate: f64,
    /// `|real_accept_rate − ideal_accept_rate|`.
    pub advantage: f64,
    /// Binomial standard error of the advantage estimate; 0 for exact games.
    pub std_error: f64,
}

impl GameResult {
    fn from_rates(trials: usize, real: f64, ideal: f64) -> GameResult {
        let t = trials as f64;
        GameResult {
            trials,
            real_accept_rate: real,
            ideal_accept_rate: ideal,
            advantage: (real - ideal).abs(),
            std_error: (real * (1.0 - real) / t + ideal * (1.0 - ideal) / t).sqrt(),
        }
    }
}

/// Run `trials` independent rounds of each arm and report the empirical
/// advantage. Trials execute in parallel on substreams indexed by
/// `(arm, trial)`, so the result is independent of thread scheduling.
pub fn distinguishing_game<C, A, R, I>(
    adversary: A,
    real_arm: R,
    ideal_arm: I,
    trials: usize,
    rng: &LabRng,
) -> Result<GameResult>
where
    C: Send,
    A: Fn(&C, &mut LabRng) -> Result<bool> + Sync,
    R: Fn(&mut LabRng) -> Result<C> + Sync,
    I: Fn(&mut LabRng) -> Result<C> + Sync,
{
    if trials == 0 {
        return Err(Error::InvalidArgument("trials must be positive".into()));
    }
    let run_arm = |real: bool| -> Result<usize> {
        (0..trials)
            .into_par_iter()
            .map(|i| {
                let mut r = rng.substream(2 * i as u64 + real as u64);
                let challenge = if real { real_arm(&mut r)? } else { ideal_arm(&mut r)? };
                Ok(adversary(&challenge, &mut r)? as usize)
            })
            .sum()
    };
    let real_accepts = run_arm(true)?;
    let ideal_accepts = run_arm(false)?;
    Ok(GameResult::from_rates(
        trials,
        real_accepts as f64 / trials as f64,
        ideal_accepts as f64 / trials as f64,
    ))
}

// ---------------------------------------------------------------------------
// Generic adversaries against the state generator
// ---------------------------------------------------------------------------

/// One arm of the generator's security game, presented to the adversary as
/// a classical-input query interface. The real arm answers from `Gen(k, ·)`
/// with a hidden key; the ideal arm answers from a lazily sampled random
/// function `x ↦ |ψ_x⟩` of independent Haar states, consistent across
/// repeated queries. `published_key` equals the hidden key in the real arm
/// and is an unrelated random string in the ideal arm — only the
/// revealed-key sanity adversary reads it.
pub struct PrfsgChallenge<'a> {
    params: &'a PrfsgParams,
    pub published_key: BitString,
    arm: ChallengeArm,
    queries: Cell<usize>,
}

enum ChallengeArm {
    Real { key: BitString },
    Ideal { cache: RefCell<HashMap<BitString, PureState>>, rng: Box<RefCell<LabRng>> },
}

impl<'a> PrfsgChallenge<'a> {
    pub fn real(params: &'a PrfsgParams, key: BitString) -> Result<Self> {
        check_key(params.key_bits, &key)?;
        Ok(PrfsgChallenge {
            params,
            published_key: key.clone(),
            arm: ChallengeArm::Real { key },
            queries: Cell::new(0),
        })
    }

    pub fn ideal(params: &'a PrfsgParams, mut rng: LabRng) -> Self {
        let published_key = BitString::random(params.key_bits, &mut rng);
        PrfsgChallenge {
            params,
            published_key,
            arm: ChallengeArm::Ideal {
                cache: RefCell::new(HashMap::new()),
                rng: Box::new(RefCell::new(rng)),
            },
            queries: Cell::new(0),
        }
    }

    /// One classical query at input `x`.
    pub fn query(&self, x: &BitString) -> Result<PureState> {
        if x.len() != self.params.input_bits {
            return Err(Error::InvalidArgument(format!(
                "input length {} ≠ m = {}",
                x.len(),
                self.params.input_bits
            )));
        }
        self.queries.set(self.queries.get() + 1);
        match &self.arm {
            ChallengeArm::Real { key } => prfsg_gen(self.params, key, x),
            ChallengeArm::Ideal { cache, rng } => {
                let mut cache = cache.borrow_mut();
                if let Some(state) = cache.get(x) {
                    return Ok(state.clone());
                }
                let state = haar_state(self.params.output_qubits(), &mut rng.borrow_mut())?;
                cache.insert(x.clone(), state.clone());
                Ok(state)
            }
        }
    }

    pub fn queries_used(&self) -> usize {
        self.queries.get()
    }
}

/// A named adversary's game outcome.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct AdversaryRun {
    pub name: String,
    pub result: GameResult,
}

/// Report of the generic-adversary suite.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SuiteReport {
    pub runs: Vec<AdversaryRun>,
    /// Largest advantage any suite adversary achieved.
    pub max_advantage: f64,
}

fn game_arms<'a>(
    params: &'a PrfsgParams,
) -> (
    impl Fn(&mut LabRng) -> Result<PrfsgChallenge<'a>> + Sync + 'a,
    impl Fn(&mut LabRng) -> Result<PrfsgChallenge<'a>> + Sync + 'a,
) {
    let real = move |r: &mut LabRng| {
        let key = BitString::random(params.key_bits, r);
        PrfsgChallenge::real(params, key)
    };
    let ideal = move |r: &mut LabRng| Ok(PrfsgChallenge::ideal(params, r.substream(STREAM_IDEAL_ORACLE)));
    (real, ideal)
}

/// The suite's strongest member: spend the query budget on one challenge
/// state and grade the first `min(q, 2^κ)` keys against it by squared
/// overlap. In this simulator the adversary reads overlaps exactly — an
/// information-theoretic stand-in for repeated swap testing that can only
/// overestimate what a physical adversary extracts.
fn key_guess_accepts(challenge: &PrfsgChallenge, q: usize) -> Result<bool> {
    let params = challenge.params;
    let x0 = BitString::from_value(0, params.input_bits.max(1))
        .map(|x| x.prefix(params.input_bits))
        .unwrap_or_else(|_| BitString::empty());
    let sigma = challenge.query(&x0)?;
    let guesses = (1usize << params.key_bits).min(q.max(1));
    for g in 0..guesses {
        let k = BitString::from_value(g as u64, params.key_bits)?;
        let reference = prfsg_gen(params, &k, &x0)?;
        if sigma.overlap_sq(&reference)? >= KEY_GUESS_THETA {
            return Ok(true);
        }
    }
    Ok(false)
}

/// Run the library of generic adversaries (budget `q` classical queries
/// each) and report every game plus the maximum advantage observed.
pub fn prfsg_hybrid_adversary_suite(
    params: &PrfsgParams,
    q: usize,
    trials: usize,
    rng: &LabRng,
) -> Result<SuiteReport> {
    if params.key_bits > 10 {
        return Err(Error::InvalidArgument(format!(
            "suite is desk-scale only: κ = {} exceeds 10",
            params.key_bits
        )));
    }
    if params.input_bits == 0 {
        return Err(Error::InvalidArgument("suite adversaries need m ≥ 1".into()));
    }
    if q < 2 {
        return Err(Error::InvalidArgument("suite needs a budget of q ≥ 2".into()));
    }
    let mut runs = Vec::new();

    // Zero queries: accepts on a coin flip, the null baseline.
    let (real, ideal) = game_arms(params);
    let zero = distinguishing_game(
        |_c: &PrfsgChallenge, r: &mut LabRng| Ok(r.coin(0.5)),
        &real,
        &ideal,
        trials,
        &rng.substream(1),
    )?;
    runs.push(AdversaryRun { name: "zero-query".into(), result: zero });

    // Repeated input: both arms must answer consistently, so the swap test
    // between the two copies always passes and carries no signal.
    let repeat = distinguishing_game(
        |c: &PrfsgChallenge, r: &mut LabRng| {
            let x = BitString::from_value(0, c.params.input_bits)?;
            let a = c.query(&x)?.to_density();
            let b = c.query(&x)?.to_density();
            Ok(crate::state_tests::swap_test_sample(&a, &b, r)?.passed)
        },
        &real,
        &ideal,
        trials,
        &rng.substream(2),
    )?;
    runs.push(AdversaryRun { name: "repeat-consistency".into(), result: repeat });

    // Distinct inputs: in both arms the two answers are independent Haar
    // draws, so the collision swap test has the same pass rate in each.
    let collision = distinguishing_game(
        |c: &PrfsgChallenge, r: &mut LabRng| {
            let x0 = BitString::from_value(0, c.params.input_bits)?;
            let x1 = BitString::from_value(1, c.params.input_bits)?;
            let a = c.query(&x0)?.to_density();
            let b = c.query(&x1)?.to_density();
            Ok(crate::state_tests::swap_test_sample(&a, &b, r)?.passed)
        },
        &real,
        &ideal,
        trials,
        &rng.substream(3),
    )?;
    runs.push(AdversaryRun { name: "collision-swap".into(), result: collision });

    // Key guessing within the query budget.
    let key_guess = distinguishing_game(
        |c: &PrfsgChallenge, _r: &mut LabRng| key_guess_accepts(c, q),
        &real,
        &ideal,
        trials,
        &rng.substream(4),
    )?;
    runs.push(AdversaryRun { name: "key-guess-threshold".into(), result: key_guess });

    let max_advantage = runs.iter().map(|r| r.result.advantage).fold(0.0, f64::max);
    Ok(SuiteReport { runs, max_advantage })
}

/// Sanity inversion: an adversary handed the key outright must win. Real
/// arm: the challenge state at a fixed input matches `Gen(published_key, ·)`
/// exactly. Ideal arm: the published key is unrelated to the Haar answers.
pub fn prfsg_revealed_key_sanity(
    params: &PrfsgParams,
    trials: usize,
    rng: &LabRng,
) -> Result<GameResult> {
    let (real, ideal) = game_arms(params);
    distinguishing_game(
        |c: &PrfsgChallenge, _r: &mut LabRng| {
            let x0 = BitString::from_value(0, c.params.input_bits)?;
            let sigma = c.query(&x0)?;
            let reference = prfsg_gen(c.params, &c.published_key, &x0)?;
            Ok(sigma.overlap_sq(&reference)? >= KEY_GUESS_THETA)
        },
        &real,
        &ideal,
        trials,
        rng,
    )
}

/// Brute-force evaluation of the key-guess game: enumerate every key for
/// the real arm (the challenge overlaps are exact numbers, so acceptance is
/// a deterministic predicate per key) and integrate the ideal arm in closed
/// form using the Haar overlap tail `P[|⟨σ|φ⟩|² ≥ θ] = (1−θ)^{D−1}`.
///
/// The closed form requires the per-guess acceptance events to be disjoint,
/// which holds whenever `2θ ≥ 1 + max_{i≠j} |⟨φ_i|φ_j⟩|`; the function
/// verifies this on the realized reference states and errors otherwise.
pub fn prfsg_key_guess_exact(params: &PrfsgParams, q: usize) -> Result<GameResult> {
    if params.key_bits > 10 {
        return Err(Error::InvalidArgument(format!(
            "exact enumeration is desk-scale only: κ = {} exceeds 10",
            params.key_bits
        )));
    }
    let x0 = BitString::from_value(0, params.input_bits)?;
    let keys = 1usize << params.key_bits;
    let guesses = keys.min(q.max(1));
    let references: Vec<PureState> = (0..guesses)
        .map(|g| prfsg_gen(params, &BitString::from_value(g as u64, params.key_bits)?, &x0))
        .collect::<Result<_>>()?;

    let mut max_cross: f64 = 0.0;
    for i in 0..references.len() {
        for j in 0..i {
            max_cross = max_cross.max(references[i].overlap_sq(&references[j])?.sqrt());
        }
    }
    if 2.0 * KEY_GUESS_THETA < 1.0 + max_cross {
        return Err(Error::InvalidArgument(format!(
            "reference states too close for disjoint tail integration \
             (max |⟨φ_i|φ_j⟩| = {max_cross:.3})"
        )));
    }

    let mut real_accepts = 0usize;
    for k in 0..keys {
        let sigma = prfsg_gen(params, &BitString::from_value(k as u64, params.key_bits)?, &x0)?;
        for reference in &references {
            if sigma.overlap_sq(reference)? >= KEY_GUESS_THETA {
                real_accepts += 1;
                break;
            }
        }
    }
    let real = real_accepts as f64 / keys as f64;

    let dim = 1usize << params.output_qubits();
    let tail = (1.0 - KEY_GUESS_THETA).powi(dim as i32 - 1);
    let ideal = (guesses as f64 * tail).min(1.0);

    Ok(GameResult {
        trials: keys,
        real_accept_rate: real,
        ideal_accept_rate: ideal,
        advantage: (real - ideal).abs(),
        std_error: 0.0,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hilbert::trace_distance;
    use crate::oracle::LengthFunction;
    use crate::state_tests::{purity_battery, PurityBatteryConfig};

    fn oracle(seed: u64) -> ChfsInstance {
        ChfsInstance::new(seed, LengthFunction::Identity)
    }

    #[test]
    fn generator_is_deterministic_and_inputs_are_fresh() {
        let params = PrfsgParams::new(3, 2, oracle(10)).unwrap();
        let k = BitString::from_value(0b101, 3).unwrap();
        let x = BitString::from_value(0b01, 2).unwrap();
        let a = prfsg_gen(&params, &k, &x).unwrap();
        let b = prfsg_gen(&params, &k, &x).unwrap();
        assert!((a.overlap_sq(&b).unwrap() - 1.0).abs() < 1e-12);

        // Distinct (k, x) pairs hit distinct oracle cells — independent
        // draws, so overlaps sit far from 1.
        let x2 = BitString::from_value(0b10, 2).unwrap();
        let k2 = BitString::from_value(0b100, 3).unwrap();
        for other in [
            prfsg_gen(&params, &k, &x2).unwrap(),
            prfsg_gen(&params, &k2, &x).unwrap(),
        ] {
            assert!(a.overlap_sq(&other).unwrap() < 0.9);
        }
    }

    #[test]
    fn generator_output_width_follows_the_length_function() {
        let params =
            PrfsgParams::new(8, 8, ChfsInstance::new(11, LengthFunction::FloorLog)).unwrap();
        let k = BitString::from_value(0, 8).unwrap();
        let x = BitString::from_value(0, 8).unwrap();
        assert_eq!(prfsg_gen(&params, &k, &x).unwrap().qubits(), 4);
        assert_eq!(params.output_qubits(), 4);
    }

    #[test]
    fn generator_params_enforce_caps() {
        // Identity length: κ + m = 13 would need 13 output qubits.
        assert!(PrfsgParams::new(7, 6, oracle(1)).is_err());
        // 64-bit query cap.
        assert!(PrfsgParams::new(16, 60, ChfsInstance::new(1, LengthFunction::FloorLog)).is_err());
        // Length mismatches at call time.
        let params = PrfsgParams::new(2, 2, oracle(2)).unwrap();
        let short = BitString::from_value(0, 1).unwrap();
        let x = BitString::from_value(0, 2).unwrap();
        assert!(prfsg_gen(&params, &short, &x).is_err());
        assert!(prfsg_gen(&params, &x, &short).is_err());
    }

    #[test]
    fn empty_circuit_is_the_identity_channel() {
        let c = PruCandidate::new(2, 3, vec![]).unwrap();
        let inst = oracle(20);
        let k = BitString::from_value(1, 2).unwrap();
        let mut rng = LabRng::from_seed_u64(21);
        let rho = haar_state(3, &mut rng).unwrap().to_density();
        let out = pru_apply(&c, &inst, &k, &rho).unwrap();
        assert!(trace_distance(&out, &rho).unwrap() < 1e-12);
    }

    #[test]
    fn single_query_layer_rotates_the_aligned_axis() {
        // S_x maps |0^ℓ, 0⟩ to |φ_x, 1⟩.
        let inst = oracle(22);
        let x = BitString::from_value(0b110, 3).unwrap();
        let c = PruCandidate::new(1, 4, vec![PruLayer::FixedQuery { x: x.clone() }]).unwrap();
        let k = BitString::from_value(0, 1).unwrap();
        let input = PureState::zero(4).unwrap().to_density();
        let out = pru_apply(&c, &inst, &k, &input).unwrap();
        let phi = inst.oracle_state(&x).unwrap();
        let expected = phi.tensor(&PureState::computational(1, 1).unwrap()).unwrap();
        assert!((out.expectation(&expected).unwrap() - 1.0).abs() < 1e-10);
    }

    #[test]
    fn unitary_layers_preserve_trace_and_purity() {
        let inst = oracle(23);
        let c = PruCandidate::new(
            2,
            4,
            vec![
                PruLayer::Scramble { seed: 1 },
                PruLayer::OracleQuery { seed: 2, len: 3 },
                PruLayer::Scramble { seed: 3 },
            ],
        )
        .unwrap();
        let k = BitString::from_value(0b10, 2).unwrap();
        let mut rng = LabRng::from_seed_u64(24);
        let rho = haar_state(4, &mut rng).unwrap().to_density();
        let out = pru_apply(&c, &inst, &k, &rho).unwrap();
        assert!((out.trace().re - 1.0).abs() < 1e-10 && out.trace().im.abs() < 1e-12);
        assert!((out.purity() - 1.0).abs() < 1e-10);

        // An adaptive query keeps the trace but generally mixes.
        let adaptive = PruCandidate::new(
            2,
            4,
            vec![PruLayer::Scramble { seed: 1 }, PruLayer::AdaptiveQuery { bits: 3 }],
        )
        .unwrap();
        let out = pru_apply(&adaptive, &inst, &k, &rho).unwrap();
        assert!((out.trace().re - 1.0).abs() < 1e-10 && out.trace().im.abs() < 1e-12);
        assert!(out.purity() < 1.0 - 1e-3);

        // Depolarizing slack mixes by exactly the declared amount.
        let noisy =
            PruCandidate::new(2, 4, vec![PruLayer::Depolarize { strength: 0.5 }]).unwrap();
        let out = pru_apply(&noisy, &inst, &k, &rho).unwrap();
        let expect = DensityMatrix::mixture(&[
            (0.5, rho.clone()),
            (0.5, DensityMatrix::maximally_mixed(4).unwrap()),
        ])
        .unwrap();
        assert!(trace_distance(&out, &expect).unwrap() < 1e-12);
    }

    #[test]
    fn long_queries_are_invisible_on_haar_inputs() {
        // Candidate with two long queries; skipping them (the unitary part
        // alone) moves a Haar input by at most 2m/2^{τ/2} in expectation.
        let inst = oracle(25);
        let c = PruCandidate::new(
            2,
            6,
            vec![
                PruLayer::Scramble { seed: 4 },
                PruLayer::OracleQuery { seed: 5, len: 5 },
                PruLayer::Scramble { seed: 6 },
                PruLayer::OracleQuery { seed: 7, len: 5 },
                PruLayer::Scramble { seed: 8 },
            ],
        )
        .unwrap();
        let k = BitString::from_value(0b01, 2).unwrap();
        let tilde = pru_unitary_part(&c, &k).unwrap();
        let mut rng = LabRng::from_seed_u64(26);
        let samples = 30;
        let mean: f64 = (0..samples)
            .map(|_| {
                let psi = haar_state(6, &mut rng).unwrap();
                let full = pru_apply(&c, &inst, &k, &psi.to_density()).unwrap();
                let skipped = tilde.apply(&psi).unwrap().to_density();
                trace_distance(&full, &skipped).unwrap()
            })
            .sum::<f64>()
            / samples as f64;
        let tau = 5.0; // both query strings have length 5
        let bound = 2.0 * 2.0 / 2f64.powf(tau / 2.0);
        assert!(mean <= bound, "mean distance {mean} exceeds hybrid bound {bound}");
    }

    #[test]
    fn query_strings_replay_and_reject_adaptivity() {
        let c = PruCandidate::new(
            2,
            4,
            vec![PruLayer::OracleQuery { seed: 9, len: 3 }, PruLayer::Scramble { seed: 10 }],
        )
        .unwrap();
        let k = BitString::from_value(0b11, 2).unwrap();
        assert_eq!(pru_query_strings(&c, &k).unwrap(), pru_query_strings(&c, &k).unwrap());
        let k2 = BitString::from_value(0b00, 2).unwrap();
        assert_ne!(pru_query_strings(&c, &k).unwrap(), pru_query_strings(&c, &k2).unwrap());

        let adaptive =
            PruCandidate::new(2, 4, vec![PruLayer::AdaptiveQuery { bits: 3 }]).unwrap();
        assert!(pru_query_strings(&adaptive, &k).is_err());
        assert!(pru_unitary_part(&adaptive, &k).is_err());
    }

    #[test]
    fn trivial_generator_emits_the_zero_state() {
        let c = PrsgCandidate::new(1, 2, 1, true, vec![]).unwrap();
        let inst = oracle(30);
        let k = BitString::from_value(0, 1).unwrap();
        let run = prsg_gen(&c, &inst, &k).unwrap();
        assert!(run.measurement_log.is_empty());
        assert!((run.ancilla_reset_fidelity - 1.0).abs() < 1e-12);
        let zero = PureState::zero(2).unwrap();
        assert!((run.output.expectation(&zero).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn product_form_candidate_is_exactly_pure_and_rewindable() {
        // Two oracle writes then a scramble of the output register only:
        // the §-style nonadaptive form. Output must be exactly pure, and
        // unwinding the scramble must recover the product state exactly.
        let inst = ChfsInstance::new(31, LengthFunction::FloorLog);
        let c = PrsgCandidate::new(
            2,
            4,
            1,
            true,
            vec![
                PrsgStep::OracleWrite { seed: 1, len: 4, targets: vec![0, 1] },
                PrsgStep::OracleWrite { seed: 2, len: 4, targets: vec![2, 3] },
                PrsgStep::Scramble { seed: 3, targets: vec![0, 1, 2, 3] },
            ],
        )
        .unwrap();
        let k = BitString::from_value(0b01, 2).unwrap();
        let run = prsg_gen(&c, &inst, &k).unwrap();
        assert!((run.output.purity() - 1.0).abs() < 1e-10);
        assert!((run.ancilla_reset_fidelity - 1.0).abs() < 1e-12);

        let tilde = prsg_unitary_part(&c, &k).unwrap();
        let rewound = tilde.adjoint().conjugate(&run.pre_trace).unwrap();
        let mut expected = PureState::zero(0).unwrap();
        for (x, _) in prsg_query_strings(&c, &k).unwrap() {
            expected = expected.tensor(&inst.oracle_state(&x).unwrap()).unwrap();
        }
        expected = expected.tensor(&PureState::zero(1).unwrap()).unwrap();
        assert!(trace_distance(&rewound, &expected.to_density()).unwrap() < 1e-9);
    }

    #[test]
    fn measurement_mixes_the_output_and_the_battery_notices() {
        let inst = oracle(32);
        let c = PrsgCandidate::new(
            1,
            2,
            0,
            true,
            vec![
                PrsgStep::Scramble { seed: 7, targets: vec![0, 1] },
                PrsgStep::Measure { qubit: 0 },
            ],
        )
        .unwrap();
        let k = BitString::from_value(0, 1).unwrap();
        let run = prsg_gen(&c, &inst, &k).unwrap();
        assert_eq!(run.measurement_log.len(), 1);
        let p1 = run.measurement_log[0].prob_one;
        assert!((0.0..=1.0).contains(&p1));
        assert!(run.output.purity() < 1.0 - 1e-3);

        let cfg = PurityBatteryConfig::new(100, 10).unwrap();
        let mut rng = LabRng::from_seed_u64(33);
        let outcome = purity_battery(&run.output, &cfg, &mut rng).unwrap();
        assert!(outcome.flagged_impure, "fail count {}", outcome.fail_count);
    }

    #[test]
    fn quasi_pure_violations_error_and_honest_candidates_report() {
        let inst = oracle(34);
        // Scrambling output and ancilla together leaves the ancilla dirty.
        let steps = vec![PrsgStep::Scramble { seed: 5, targets: vec![0, 1, 2] }];
        let lying = PrsgCandidate::new(1, 2, 1, true, steps.clone()).unwrap();
        let k = BitString::from_value(0, 1).unwrap();
        let err = prsg_gen(&lying, &inst, &k).unwrap_err();
        assert!(matches!(err, Error::QuasiPureViolation { .. }), "got {err:?}");

        let honest = PrsgCandidate::new(1, 2, 1, false, steps).unwrap();
        let run = prsg_gen(&honest, &inst, &k).unwrap();
        assert!(run.ancilla_reset_fidelity < 1.0 - 1e-3);
    }

    #[test]
    fn oracle_writes_demand_zeroed_targets() {
        let inst = oracle(35);
        let c = PrsgCandidate::new(
            1,
            2,
            0,
            true,
            vec![
                PrsgStep::Scramble { seed: 1, targets: vec![0, 1] },
                PrsgStep::FixedWrite {
                    x: BitString::from_value(0b101, 3).unwrap(),
                    targets: vec![0, 1],
                },
            ],
        )
        .unwrap();
        // Identity length: |x| = 3 → 3 qubits ≠ 2 targets, so use FloorLog.
        let inst_log = ChfsInstance::new(35, LengthFunction::FloorLog);
        let c_log = PrsgCandidate::new(
            1,
            2,
            0,
            true,
            vec![
                PrsgStep::Scramble { seed: 1, targets: vec![0, 1] },
                PrsgStep::FixedWrite {
                    x: BitString::from_value(0b1011, 4).unwrap(),
                    targets: vec![0, 1],
                },
            ],
        )
        .unwrap();
        let k = BitString::from_value(0, 1).unwrap();
        assert!(matches!(
            prsg_gen(&c_log, &inst_log, &k).unwrap_err(),
            Error::InvalidQuery(_)
        ));
        // Shape mismatch is caught as a dimension error.
        assert!(matches!(
            prsg_gen(&c, &inst, &k).unwrap_err(),
            Error::DimensionMismatch { .. }
        ));
    }

    #[test]
    fn candidates_round_trip_through_json() {
        let c = PruCandidate::new(
            2,
            4,
            vec![
                PruLayer::Scramble { seed: 1 },
                PruLayer::FixedQuery { x: BitString::from_value(0b101, 3).unwrap() },
                PruLayer::Depolarize { strength: 0.25 },
            ],
        )
        .unwrap();
        let json = serde_json::to_string(&c).unwrap();
        let back: PruCandidate = serde_json::from_str(&json).unwrap();
        let k = BitString::from_value(3, 2).unwrap();
        let inst = oracle(36);
        let rho = DensityMatrix::maximally_mixed(4).unwrap();
        let a = pru_apply(&c, &inst, &k, &rho).unwrap();
        let b = pru_apply(&back, &inst, &k, &rho).unwrap();
        assert!(trace_distance(&a, &b).unwrap() < 1e-12);

        let g = PrsgCandidate::new(
            1,
            2,
            1,
            true,
            vec![PrsgStep::OracleWrite { seed: 9, len: 4, targets: vec![0, 1] }],
        )
        .unwrap();
        let json = serde_json::to_string(&g).unwrap();
        let back: PrsgCandidate = serde_json::from_str(&json).unwrap();
        assert_eq!(back.output_qubits, 2);
        assert_eq!(back.reset_fidelity_threshold, g.reset_fidelity_threshold);
    }

    #[test]
    fn trivial_adversaries_have_no_advantage() {
        let params = PrfsgParams::new(3, 2, oracle(40)).unwrap();
        let (real, ideal) = game_arms(&params);
        let always = distinguishing_game(
            |_c: &PrfsgChallenge, _r: &mut LabRng| Ok(true),
            &real,
            &ideal,
            200,
            &LabRng::from_seed_u64(41),
        )
        .unwrap();
        assert_eq!(always.advantage, 0.0);
        assert_eq!(always.real_accept_rate, 1.0);

        // Perfect distinguisher on disjoint supports.
        let perfect = distinguishing_game(
            |c: &u8, _r: &mut LabRng| Ok(*c == 1),
            |_r: &mut LabRng| Ok(1u8),
            |_r: &mut LabRng| Ok(0u8),
            100,
            &LabRng::from_seed_u64(42),
        )
        .unwrap();
        assert_eq!(perfect.advantage, 1.0);
    }

    #[test]
    fn suite_stays_under_the_search_bound_and_sanity_inverts() {
        let params = PrfsgParams::new(3, 2, oracle(43)).unwrap();
        let rng = LabRng::from_seed_u64(44);
        let report = prfsg_hybrid_adversary_suite(&params, 4, 120, &rng).unwrap();
        assert_eq!(report.runs.len(), 4);
        // q/2^κ = 1/2 plus sampling noise is a generous ceiling at κ = 3.
        assert!(
            report.max_advantage <= 0.5 + 4.0 * report.runs[3].result.std_error,
            "max advantage {}",
            report.max_advantage
        );

        let sanity = prfsg_revealed_key_sanity(&params, 120, &rng.substream(9)).unwrap();
        assert!(sanity.advantage > 0.9, "sanity advantage {}", sanity.advantage);
    }

    #[test]
    fn exact_key_guess_game_matches_monte_carlo() {
        let params = PrfsgParams::new(3, 2, oracle(45)).unwrap();
        let q = 4;
        let exact = prfsg_key_guess_exact(&params, q).unwrap();
        assert_eq!(exact.std_error, 0.0);
        // Full recovery of guessed keys: the planted key is among the first
        // q of 2^κ with probability q/2^κ, and misses essentially never fit.
        assert!((exact.real_accept_rate - q as f64 / 8.0).abs() < 0.26);

        let rng = LabRng::from_seed_u64(46);
        let (real, ideal) = game_arms(&params);
        let mc = distinguishing_game(
            |c: &PrfsgChallenge, _r: &mut LabRng| key_guess_accepts(c, q),
            &real,
            &ideal,
            400,
            &rng,
        )
        .unwrap();
        assert!(
            (mc.advantage - exact.advantage).abs() <= 3.0 * mc.std_error,
            "MC advantage {} vs exact {} (SE {})",
            mc.advantage,
            exact.advantage,
            mc.std_error
        );
    }

    #[test]
    fn challenge_counts_queries_and_ideal_arm_is_consistent() {
        let params = PrfsgParams::new(2, 2, oracle(47)).unwrap();
        let challenge = PrfsgChallenge::ideal(&params, LabRng::from_seed_u64(48));
        let x = BitString::from_value(2, 2).unwrap();
        let a = challenge.query(&x).unwrap();
        let b = challenge.query(&x).unwrap();
        assert_eq!(challenge.queries_used(), 2);
        assert!((a.overlap_sq(&b).unwrap() - 1.0).abs() < 1e-12);
        // A different input is an independent draw.
        let y = BitString::from_value(1, 2).unwrap();
        let cc = challenge.query(&y).unwrap();
        assert!(a.overlap_sq(&cc).unwrap() < 0.9);
    }
}
