//! The two distinguishers the laboratory fields against its candidate
//! constructions: a unitary-family attack that learns the short-query part
//! of the oracle by process tomography and swap-tests every key against the
//! challenge channel, and a state-generator attack that undoes the
//! candidate's unitary part and product-tests the remains.
//!
//! Both attacks end in an OR step over per-key subprotocols. At this scale
//! the key space is enumerable, so the OR tester is replaced by an exact
//! maximum over the per-key acceptance probabilities; [`or_surrogate`] keeps
//! the tester's contract visible by logging which of its promise regimes the
//! scores landed in. Probabilities are computed exactly throughout — trials
//! sample only where the protocol itself flips coins.

use ndarray::Array1;
use ndarray_linalg::c64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::collections::HashMap;

use crate::bits::BitString;
use crate::error::{Error, Result};
use crate::hilbert::{
    haar_state, trace_out_qubits, DensityMatrix, PureState, SubsystemSpec, UnitaryMatrix,
};
use crate::oracle::{swap_unitary, ChfsInstance};
use crate::primitives::{
    prsg_gen, prsg_query_strings, prsg_query_strings_for_history, prsg_unitary_part,
    pru_apply_with, pru_query_strings, PrsgCandidate, PrsgStep, PruCandidate,
};
use crate::rng::LabRng;
use crate::state_tests::{
    product_test_prob, purity_battery, swap_test_prob, BatteryOutcome, PurityBatteryConfig,
};
use crate::stats::binomial_tail_geq;
use crate::tomography::{reconstruct_unitary, NoiseMode};

/// A channel callback: the challenge map handed to a distinguisher. The
/// distinguisher never looks inside — it only applies it.
pub type Channel<'a> = &'a dyn Fn(&DensityMatrix) -> Result<DensityMatrix>;

/// Numerical slack when validating externally supplied probabilities.
const SCORE_SLACK: f64 = 1e-9;

// ---------------------------------------------------------------------------
// OR-tester surrogate
// ---------------------------------------------------------------------------

/// Which promise regime of the OR tester the observed scores fall in. The
/// surrogate itself decides by exact maximum; the regime records what the
/// tester it stands in for would have guaranteed on the same input.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum OrRegime {
    /// The best score clears `1 − ε`: the tester would accept with
    /// probability at least `(1 − ε)²/7`.
    HighScore { tester_floor: f64 },
    /// Every score is at most `δ`: the tester would accept with probability
    /// at most `4Nδ` over `N` keys.
    AllBelowDelta { tester_ceiling: f64 },
    /// The best score falls strictly between `δ` and `1 − ε` — outside the
    /// tester's promise. The surrogate rejects and flags the run.
    PromiseViolated,
}

/// Decision of the OR step, together with the witness key.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OrSurrogateResult {
    pub accepted: bool,
    pub best_key: BitString,
    pub best_score: f64,
    pub regime: OrRegime,
}

/// Exact surrogate for the OR tester: accept iff the maximum per-key
/// acceptance probability reaches `1 − ε`. Strictly stronger than the
/// tester itself, whose guarantees — accept with probability ≥ (1−ε)²/7
/// when some score clears the bar, ≤ 4Nδ when every score is below δ —
/// are recorded in the returned regime.
pub fn or_surrogate(
    scores: &[(BitString, f64)],
    epsilon: f64,
    delta: f64,
) -> Result<OrSurrogateResult> {
    if scores.is_empty() {
        return Err(Error::InvalidArgument("OR step needs at least one key".into()));
    }
    for (name, v) in [("epsilon", epsilon), ("delta", delta)] {
        if !(0.0..1.0).contains(&v) || v == 0.0 {
            return Err(Error::InvalidArgument(format!("{name} = {v} outside (0,1)")));
        }
    }
    if delta >= 1.0 - epsilon {
        return Err(Error::InvalidArgument(format!(
            "promise regimes overlap: delta {delta} ≥ 1 − epsilon = {}",
            1.0 - epsilon
        )));
    }
    let mut best: Option<(&BitString, f64)> = None;
    for (k, s) in scores {
        if !s.is_finite() || !(-SCORE_SLACK..=1.0 + SCORE_SLACK).contains(s) {
            return Err(Error::InvalidArgument(format!(
                "score {s} for key {k:?} is not a probability"
            )));
        }
        let s = s.clamp(0.0, 1.0);
        if best.is_none_or(|(_, b)| s > b) {
            best = Some((k, s));
        }
    }
    let (best_key, best_score) = best.expect("nonempty scores");
    let accepted = best_score >= 1.0 - epsilon;
    let regime = if accepted {
        OrRegime::HighScore { tester_floor: (1.0 - epsilon).powi(2) / 7.0 }
    } else if best_score <= delta {
        OrRegime::AllBelowDelta { tester_ceiling: 4.0 * scores.len() as f64 * delta }
    } else {
        OrRegime::PromiseViolated
    };
    Ok(OrSurrogateResult { accepted, best_key: best_key.clone(), best_score, regime })
}

// ---------------------------------------------------------------------------
// Attack on keyed unitary families
// ---------------------------------------------------------------------------

/// Parameters of the unitary-family distinguisher.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Alg1Config {
    /// Security parameter: the OR step accepts at `1 − 2^{−λ}` and budgets
    /// failure probability `2^{−2λ}` per reconstructed oracle slice.
    pub lambda: usize,
    /// Query-length cutoff: oracle slices for strings up to this length are
    /// reconstructed; longer queries are answered with the identity.
    pub tau: usize,
    /// Number of swap tests in each per-key subprotocol.
    pub r: usize,
    pub battery: PurityBatteryConfig,
    /// Fraction of the `r` swap tests that must pass, strictly between 1/2
    /// and 1.
    pub pass_fraction: f64,
    pub tomography_epsilon: f64,
    pub tomography_delta: f64,
    pub tomography_noise: NoiseMode,
}

impl Alg1Config {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        lambda: usize,
        tau: usize,
        r: usize,
        battery: PurityBatteryConfig,
        pass_fraction: f64,
        tomography_epsilon: f64,
        tomography_delta: f64,
        tomography_noise: NoiseMode,
    ) -> Result<Self> {
        if lambda == 0 {
            return Err(Error::InvalidArgument("lambda must be positive".into()));
        }
        if tau == 0 {
            return Err(Error::InvalidArgument("tau must be at least 1".into()));
        }
        if r < 3 {
            return Err(Error::InvalidArgument(format!(
                "r = {r} leaves no room for a 2/3-style majority; need r ≥ 3"
            )));
        }
        if !(pass_fraction > 0.5 && pass_fraction < 1.0) {
            return Err(Error::InvalidArgument(format!(
                "pass fraction {pass_fraction} outside (1/2, 1)"
            )));
        }
        for (name, v) in [("tomography_epsilon", tomography_epsilon), ("tomography_delta", tomography_delta)] {
            if !(0.0..1.0).contains(&v) || v == 0.0 {
                return Err(Error::InvalidArgument(format!("{name} = {v} outside (0,1)")));
            }
        }
        Ok(Alg1Config {
            lambda,
            tau,
            r,
            battery,
            pass_fraction,
            tomography_epsilon,
            tomography_delta,
            tomography_noise,
        })
    }

    /// The desk-scale reference parameterization used across the experiment
    /// suite: λ = 4, τ = 3, r = 12, a (64, 8) battery, a 2/3 majority, and
    /// exact reconstruction with the ε, δ the analysis assigns at this τ, λ.
    pub fn desk_default() -> Self {
        let tau = 3usize;
        Self::new(
            4,
            tau,
            12,
            PurityBatteryConfig::new(64, 8).expect("desk battery is well-formed"),
            2.0 / 3.0,
            2.0 / 2f64.powf(tau as f64 / 2.0),
            0.25f64.powi(4),
            NoiseMode::Exact,
        )
        .expect("desk defaults are well-formed")
    }

    /// The parameterization the asymptotic analysis uses against an
    /// `m`-query candidate: τ = 2·⌊log₂ 16m⌋, r = 1200λ, a (16λ², 8λ)
    /// battery, a 2/3 majority, tomography at ε = 2/2^{τ/2}, δ = 2^{−2λ}.
    /// Constructible for bookkeeping; far past what the simulator can run.
    pub fn asymptotic_scale(lambda: usize, m: usize) -> Result<Self> {
        if m == 0 {
            return Err(Error::InvalidArgument("candidate must make at least one query".into()));
        }
        let tau = 2 * (16 * m).ilog2() as usize;
        Self::new(
            lambda,
            tau,
            1200 * lambda,
            PurityBatteryConfig::from_scale(lambda, lambda)?,
            2.0 / 3.0,
            2.0 / 2f64.powf(tau as f64 / 2.0),
            0.25f64.powi(lambda as i32),
            NoiseMode::Perturbed,
        )
    }

    /// Acceptance margin of the OR step: `2^{−λ}`.
    pub fn or_epsilon(&self) -> f64 {
        0.5f64.powi(self.lambda as i32)
    }

    /// Per-key failure budget of the OR step: `2^{−2λ}`.
    pub fn or_delta(&self) -> f64 {
        0.25f64.powi(self.lambda as i32)
    }

    /// Smallest pass count that clears `pass_fraction` of `r` tests.
    pub fn pass_threshold(&self, r: usize) -> u64 {
        pass_threshold(self.pass_fraction, r)
    }
}

fn pass_threshold(pass_fraction: f64, r: usize) -> u64 {
    // Guard the ceiling against representation error in fractions like 2/3,
    // whose product with r is an integer mathematically but not in floats.
    (((pass_fraction * r as f64) - 1e-9).ceil() as u64).max(1)
}

/// The adversary's reconstruction of the oracle up to query length τ:
/// a reflection slice per query string the candidate family can issue,
/// identity for everything longer.
#[derive(Clone, Debug)]
pub struct TruncatedOracle {
    tau: usize,
    slices: HashMap<BitString, UnitaryMatrix>,
    /// Total black-box applications spent across all reconstructions.
    pub queries_used: usize,
    /// The per-slice diamond-distance budget the reconstructions were run at.
    pub epsilon: f64,
}

impl TruncatedOracle {
    pub fn tau(&self) -> usize {
        self.tau
    }

    /// Number of distinct query strings reconstructed.
    pub fn known_strings(&self) -> usize {
        self.slices.len()
    }

    /// The reconstructed slice for a short string, `None` for strings past
    /// the cutoff. Errors on a short string that was never learned — the
    /// substituted circuit would silently diverge from the candidate.
    pub fn resolve(&self, x: &BitString) -> Result<Option<UnitaryMatrix>> {
        if x.len() > self.tau {
            return Ok(None);
        }
        match self.slices.get(x) {
            Some(u) => Ok(Some(u.clone())),
            None => Err(Error::InvalidQuery(format!(
                "no reconstructed slice for {}-bit query within cutoff {}",
                x.len(),
                self.tau
            ))),
        }
    }
}

/// Learn the short-query part of the oracle, as the attack's step 2: walk
/// every key's query strings, and reconstruct the reflection for each
/// distinct string of length ≤ τ by process tomography. Strings above the
/// cutoff are left to the identity substitution. The candidate must be
/// non-adaptive — substitution presumes key-determined strings.
pub fn learn_truncated_oracle(
    cfg: &Alg1Config,
    oracle: &ChfsInstance,
    candidate: &PruCandidate,
    rng: &mut LabRng,
) -> Result<TruncatedOracle> {
    let mut slices: HashMap<BitString, UnitaryMatrix> = HashMap::new();
    let mut queries_used = 0usize;
    for k in BitString::all_of_len(candidate.key_bits)? {
        for x in pru_query_strings(candidate, &k)? {
            if x.len() > cfg.tau || slices.contains_key(&x) {
                continue;
            }
            let s = swap_unitary(oracle, &x)?;
            if s.qubits() != candidate.n_qubits {
                return Err(Error::DimensionMismatch {
                    expected: 1usize << candidate.n_qubits,
                    got: 1usize << s.qubits(),
                });
            }
            let apply = |col: &Array1<c64>| -> Result<Array1<c64>> {
                Ok(s.matrix().dot(col))
            };
            let result = reconstruct_unitary(
                &apply,
                s.unitary().dim(),
                cfg.tomography_epsilon,
                cfg.tomography_delta,
                cfg.tomography_noise,
                rng,
            )?;
            queries_used += result.queries_used;
            slices.insert(x, result.reconstructed);
        }
    }
    Ok(TruncatedOracle { tau: cfg.tau, slices, queries_used, epsilon: cfg.tomography_epsilon })
}

/// The r pair-blocks a per-key subprotocol consumes: each block holds the
/// same challenge input on side A and the same channel output on side A′,
/// so the r swap tests are i.i.d. with one exactly computable pass rate.
#[derive(Clone, Debug)]
pub struct PairedBlocks {
    a: DensityMatrix,
    a_prime: DensityMatrix,
    r: usize,
}

impl PairedBlocks {
    pub fn new(a: DensityMatrix, a_prime: DensityMatrix, r: usize) -> Result<Self> {
        if a.dim() != a_prime.dim() {
            return Err(Error::DimensionMismatch { expected: a.dim(), got: a_prime.dim() });
        }
        if r == 0 {
            return Err(Error::InvalidArgument("need at least one pair-block".into()));
        }
        Ok(PairedBlocks { a, a_prime, r })
    }

    pub fn input(&self) -> &DensityMatrix {
        &self.a
    }

    pub fn channel_output(&self) -> &DensityMatrix {
        &self.a_prime
    }

    pub fn r(&self) -> usize {
        self.r
    }
}

/// Exact acceptance probability of one per-key subprotocol: apply the
/// substituted circuit to every A block, swap-test each against its A′
/// partner, and accept when at least `pass_fraction · r` of the r tests
/// pass. The swap tests share one exact pass rate, so the acceptance
/// probability is a binomial tail, not a sample.
pub fn p_k_subprotocol<F>(cfg: &Alg1Config, blocks: &PairedBlocks, f_k: F) -> Result<f64>
where
    F: Fn(&DensityMatrix) -> Result<DensityMatrix>,
{
    let moved = f_k(blocks.input())?;
    if moved.dim() != blocks.channel_output().dim() {
        return Err(Error::DimensionMismatch {
            expected: blocks.channel_output().dim(),
            got: moved.dim(),
        });
    }
    // Identical pure blocks can put the pass probability a few ulps above 1.
    let pass = swap_test_prob(&moved, blocks.channel_output())?.clamp(0.0, 1.0);
    Ok(binomial_tail_geq(blocks.r() as u64, cfg.pass_threshold(blocks.r()), pass))
}

/// Everything one distinguisher run records. `output` is the bit the
/// distinguisher answers with.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Alg1Outcome {
    pub output: bool,
    /// Set when the battery flagged the channel output impure; the protocol
    /// then answers 1 regardless of the OR step, but still runs it — its
    /// queries are nonadaptive by design.
    pub impurity_flag: bool,
    pub battery: BatteryOutcome,
    /// Exact purity of the challenge output, recorded for diagnostics.
    pub challenge_purity: f64,
    /// The purity sits within 3 standard deviations of the battery's
    /// detection boundary, where neither the flagging guarantee nor the
    /// per-key completeness claim applies. Logged, never asserted on.
    pub gap_regime: bool,
    pub or_result: OrSurrogateResult,
    pub tomography_queries: usize,
}

/// The full unitary-family distinguisher. Draws a fresh challenge input,
/// checks the channel output's purity (step 1), learns the truncated
/// oracle (step 2), scores every key's subprotocol exactly and takes the
/// OR step (step 3). Answers 1 when the channel looks like some member of
/// the candidate family, 0 when it looks independent of it.
pub fn alg1_distinguish(
    cfg: &Alg1Config,
    v: Channel,
    oracle: &ChfsInstance,
    candidate: &PruCandidate,
    rng: &mut LabRng,
) -> Result<Alg1Outcome> {
    let rho = haar_state(candidate.n_qubits, rng)?.to_density();
    let v_rho = v(&rho)?;
    if v_rho.qubits() != candidate.n_qubits {
        return Err(Error::DimensionMismatch {
            expected: 1usize << candidate.n_qubits,
            got: v_rho.dim(),
        });
    }
    v_rho.validate_full(1e-8)?;

    let battery = purity_battery(&v_rho, &cfg.battery, rng)?;
    let impurity_flag = battery.flagged_impure;
    let challenge_purity = v_rho.purity();
    let gap_regime = near_detection_boundary(&cfg.battery, challenge_purity);

    let learned = learn_truncated_oracle(cfg, oracle, candidate, rng)?;

    let blocks = PairedBlocks::new(rho, v_rho, cfg.r)?;
    let keys: Vec<BitString> = BitString::all_of_len(candidate.key_bits)?.collect();
    let scores: Result<Vec<(BitString, f64)>> = keys
        .into_par_iter()
        .map(|k| {
            let score = p_k_subprotocol(cfg, &blocks, |state| {
                pru_apply_with(candidate, &k, state, |x| learned.resolve(x))
            })?;
            Ok((k, score))
        })
        .collect();
    let or_result = or_surrogate(&scores?, cfg.or_epsilon(), cfg.or_delta())?;

    let output = if impurity_flag { true } else { or_result.accepted };
    Ok(Alg1Outcome {
        output,
        impurity_flag,
        battery,
        challenge_purity,
        gap_regime,
        or_result,
        tomography_queries: learned.queries_used,
    })
}

/// Whether a state of this purity puts the battery's expected fail count
/// within 3 standard deviations of its threshold. The battery detects
/// reliably only beyond this band, and the per-key completeness claims
/// assume purity on its far side; the band between is promised nothing.
fn near_detection_boundary(battery: &PurityBatteryConfig, purity: f64) -> bool {
    let fail_prob = (1.0 - purity) / 2.0;
    let reps = battery.repetitions as f64;
    let mean = reps * fail_prob;
    let sd = (reps * fail_prob * (1.0 - fail_prob)).sqrt();
    (mean - battery.fail_threshold as f64).abs() <= 3.0 * sd
}

// ---------------------------------------------------------------------------
// Attack on quasi-pure state generators
// ---------------------------------------------------------------------------

/// Parameters of the state-generator distinguisher.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Alg2Config {
    /// Security parameter: the OR step budgets `2^{−2λ}` per key.
    pub lambda: usize,
    /// Product-test repetitions per key; a key scores `p^r` where `p` is
    /// its exact single-repetition all-pass probability.
    pub r: usize,
    /// Purity scale `T`: the generator's completeness claim assumes
    /// challenge purity ≥ 1 − 1/T, and the battery is sized to detect
    /// anything below it.
    pub t_scale: usize,
    pub battery: PurityBatteryConfig,
}

impl Alg2Config {
    pub fn new(
        lambda: usize,
        r: usize,
        t_scale: usize,
        battery: PurityBatteryConfig,
    ) -> Result<Self> {
        for (name, v) in [("lambda", lambda), ("r", r), ("t_scale", t_scale)] {
            if v == 0 {
                return Err(Error::InvalidArgument(format!("{name} must be positive")));
            }
        }
        Ok(Alg2Config { lambda, r, t_scale, battery })
    }

    /// Desk-scale reference parameterization: λ = 4, r = 4, T = 4, and a
    /// (64, 8) battery whose detection boundary sits at purity 1 − 1/T.
    pub fn desk_default() -> Self {
        Self::new(4, 4, 4, PurityBatteryConfig::new(64, 8).expect("desk battery is well-formed"))
            .expect("desk defaults are well-formed")
    }

    /// Acceptance margin of the OR step: the generator's completeness claim
    /// guarantees per-key acceptance ≥ 4/5, so the bar is 1 − 1/5.
    pub fn or_epsilon(&self) -> f64 {
        0.2
    }

    /// Per-key failure budget of the OR step: `2^{−2λ}`.
    pub fn or_delta(&self) -> f64 {
        0.25f64.powi(self.lambda as i32)
    }

    /// The purity floor `1 − 1/T` the completeness claim assumes.
    pub fn purity_floor(&self) -> f64 {
        1.0 - 1.0 / self.t_scale as f64
    }
}

/// How the distinguisher learns a key's query inputs in step 2.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum QueryLearning {
    /// Read the strings straight off the candidate's key derivation.
    /// Exact, but only defined for non-adaptive candidates.
    DirectInspection,
    /// Simulate the generator once, take each intermediate measurement's
    /// most likely outcome, and derive the strings along that branch — the
    /// runnable stand-in for learning the inputs without oracle queries.
    ArgmaxFromBranches,
}

/// What step 2 learned about one key: the argmax measurement outcomes (empty
/// under [`QueryLearning::DirectInspection`]) and the query strings with
/// their target registers.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LearnedQueries {
    pub outcomes: Vec<bool>,
    pub queries: Vec<(BitString, Vec<usize>)>,
}

/// Learn one key's query inputs by the chosen mode.
pub fn learn_candidate_queries(
    candidate: &PrsgCandidate,
    oracle: &ChfsInstance,
    k: &BitString,
    mode: QueryLearning,
) -> Result<LearnedQueries> {
    match mode {
        QueryLearning::DirectInspection => Ok(LearnedQueries {
            outcomes: Vec::new(),
            queries: prsg_query_strings(candidate, k)?,
        }),
        QueryLearning::ArgmaxFromBranches => {
            let run = prsg_gen(candidate, oracle, k)?;
            let outcomes: Vec<bool> =
                run.measurement_log.iter().map(|m| m.prob_one > 0.5).collect();
            let queries = prsg_query_strings_for_history(candidate, k, &outcomes)?;
            Ok(LearnedQueries { outcomes, queries })
        }
    }
}

/// The product-test part structure of a generator candidate: one part per
/// oracle write, in step order, then singletons for the rest of the output
/// register. The writes must tile the output register's leading qubits in
/// order — that layout is what makes "undo the unitary part, then product
/// test" meaningful.
pub fn candidate_part_spec(candidate: &PrsgCandidate) -> Result<SubsystemSpec> {
    let mut cursor = 0usize;
    let mut parts: Vec<usize> = Vec::new();
    for step in &candidate.steps {
        let targets = match step {
            PrsgStep::OracleWrite { targets, .. } => targets,
            PrsgStep::FixedWrite { targets, .. } => targets,
            _ => continue,
        };
        if cursor + targets.len() > candidate.output_qubits {
            return Err(Error::InvalidSubsystem(format!(
                "write of {} qubits at offset {cursor} crosses into the ancilla register",
                targets.len()
            )));
        }
        let expected: Vec<usize> = (cursor..cursor + targets.len()).collect();
        if *targets != expected {
            return Err(Error::InvalidSubsystem(format!(
                "write targets {targets:?} do not continue the output prefix at qubit {cursor}"
            )));
        }
        cursor += targets.len();
        parts.push(targets.len());
    }
    parts.extend(std::iter::repeat_n(1, candidate.output_qubits - cursor));
    SubsystemSpec::from_qubit_parts(&parts)
}

/// Pad a challenge with the candidate's zeroed ancilla, undo the unitary
/// part `Ũ_k`, and trace the ancilla back out. On the candidate's own
/// quasi-pure output this exposes the written product structure exactly.
pub fn undo_unitary_part(
    candidate: &PrsgCandidate,
    k: &BitString,
    challenge: &DensityMatrix,
) -> Result<DensityMatrix> {
    if challenge.qubits() != candidate.output_qubits {
        return Err(Error::DimensionMismatch {
            expected: 1usize << candidate.output_qubits,
            got: challenge.dim(),
        });
    }
    let padded = if candidate.ancilla_qubits == 0 {
        challenge.clone()
    } else {
        challenge.tensor(&PureState::zero(candidate.ancilla_qubits)?.to_density())?
    };
    let undone = prsg_unitary_part(candidate, k)?.adjoint().conjugate(&padded)?;
    if candidate.ancilla_qubits == 0 {
        Ok(undone)
    } else {
        let ancilla: Vec<usize> =
            (candidate.output_qubits..candidate.workspace_qubits()).collect();
        trace_out_qubits(&undone, &ancilla)
    }
}

/// Everything one state-generator distinguisher run records.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Alg2Outcome {
    pub output: bool,
    /// The battery flagged the challenge impure; the protocol answers 1 and
    /// aborts — a pure-output generator cannot have produced it honestly,
    /// and a fresh Haar state certainly did not.
    pub aborted_impure: bool,
    pub battery: BatteryOutcome,
    pub challenge_purity: f64,
    /// `None` when step 1 aborted.
    pub or_result: Option<OrSurrogateResult>,
    /// What step 2 learned for the winning key; `None` when step 1 aborted.
    pub best_key_learned: Option<LearnedQueries>,
}

/// The full state-generator distinguisher. Checks the challenge's purity
/// (step 1, answering 1 and aborting on a flag), learns each key's query
/// inputs (step 2), then per key undoes the unitary part and scores the
/// product test over the candidate's part structure, all r repetitions
/// exactly (step 3), ending in the OR step.
pub fn alg2_distinguish(
    cfg: &Alg2Config,
    challenge: &DensityMatrix,
    oracle: &ChfsInstance,
    candidate: &PrsgCandidate,
    query_learning: QueryLearning,
    rng: &mut LabRng,
) -> Result<Alg2Outcome> {
    if challenge.qubits() != candidate.output_qubits {
        return Err(Error::DimensionMismatch {
            expected: 1usize << candidate.output_qubits,
            got: challenge.dim(),
        });
    }
    challenge.validate_full(1e-8)?;

    let battery = purity_battery(challenge, &cfg.battery, rng)?;
    let challenge_purity = challenge.purity();
    if battery.flagged_impure {
        return Ok(Alg2Outcome {
            output: true,
            aborted_impure: true,
            battery,
            challenge_purity,
            or_result: None,
            best_key_learned: None,
        });
    }

    let parts = candidate_part_spec(candidate)?;
    let keys: Vec<BitString> = BitString::all_of_len(candidate.key_bits)?.collect();
    let per_key: Result<Vec<(BitString, f64, LearnedQueries)>> = keys
        .into_par_iter()
        .map(|k| {
            let learned = learn_candidate_queries(candidate, oracle, &k, query_learning)?;
            let omega = undo_unitary_part(candidate, &k, challenge)?;
            let single = product_test_prob(&omega, &parts)?;
            Ok((k, single.powi(cfg.r as i32), learned))
        })
        .collect();
    let per_key = per_key?;
    let scores: Vec<(BitString, f64)> =
        per_key.iter().map(|(k, s, _)| (k.clone(), *s)).collect();
    let or_result = or_surrogate(&scores, cfg.or_epsilon(), cfg.or_delta())?;
    let best_key_learned = per_key
        .into_iter()
        .find(|(k, _, _)| *k == or_result.best_key)
        .map(|(_, _, learned)| learned);

    Ok(Alg2Outcome {
        output: or_result.accepted,
        aborted_impure: false,
        battery,
        challenge_purity,
        or_result: Some(or_result),
        best_key_learned,
    })
}
