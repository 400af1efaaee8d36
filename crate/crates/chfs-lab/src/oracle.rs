//! Seeded families of Haar-random states indexed by bit strings, with the
//! query interfaces protocols use to touch them.
//!
//! A [`ChfsInstance`] is a lazily-materialized family `{|φ_x⟩}`: the state
//! for index `x` is an ℓ(|x|)-qubit Haar sample drawn from a child seed of
//! the instance's master seed, so the family behaves like an infinite
//! pre-sampled table — identical across calls, threads, and processes —
//! while only queried entries ever exist in memory.
//!
//! Three query styles are provided:
//!
//! - **isometry** queries append a fresh register `Y` and write `|φ_x⟩` into
//!   it, controlled on the index register `X`;
//! - **unitarized** queries apply the reflection `S_x = |0⟩⟨φ_x,1| +
//!   |φ_x,1⟩⟨0| + I_⊥` on an existing `Y` register of ℓ(|x|)+1 qubits (the
//!   appended `|1⟩` makes the target orthogonal to `|0…0⟩` structurally, so
//!   nothing is assumed about `⟨0|φ_x⟩`);
//! - **universal** queries carry the index length in a register `Λ`, which
//!   is measured before dispatching the isometry at the observed length.
//!
//! Every query style accepts classical access, which measures (equivalently,
//! fully dephases) the index register before the oracle acts.

use std::collections::HashMap;
use std::sync::Mutex;

use ndarray::{Array1, Array2};
use ndarray_linalg::c64;
use serde::{Deserialize, Serialize};

use crate::bits::BitString;
use crate::error::{Error, Result};
use crate::hilbert::{
    dephase_qubits, ensure_qubits, haar_state, measure_qubits, DensityMatrix, PureState,
    UnitaryMatrix,
};
use crate::rng::{mix64, LabRng};

/// Fixed stream tag for oracle-state sampling, so oracle draws can never
/// collide with experiment streams derived from the same seed space.
const ORACLE_STREAM: u64 = 0x6f72_6163;

/// Output-length function ℓ: the number of qubits of `|φ_x⟩` as a function
/// of `|x|`. All kinds are clamped to ℓ ≥ 1 (a zero-qubit oracle state would
/// collapse every index to the same scalar) and are monotone nondecreasing.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum LengthFunction {
    /// ℓ(n) = n.
    Identity,
    /// ℓ(n) = ⌊log₂ n⌋, clamped to ≥ 1.
    FloorLog,
    /// ℓ(n) = ⌊2 log₂ n⌋ (computed exactly as ⌊log₂ n²⌋), clamped to ≥ 1.
    TwoFloorLog,
    /// ℓ(n) = c, clamped to ≥ 1.
    Constant(usize),
}

impl LengthFunction {
    /// Evaluate ℓ(|x|). `input_len` must be ≥ 1.
    pub fn eval(&self, input_len: usize) -> usize {
        debug_assert!(input_len >= 1, "length functions are defined on |x| ≥ 1");
        let raw = match self {
            LengthFunction::Identity => input_len,
            LengthFunction::FloorLog => (input_len as u64).ilog2() as usize,
            LengthFunction::TwoFloorLog => {
                ((input_len as u64) * (input_len as u64)).ilog2() as usize
            }
            LengthFunction::Constant(c) => *c,
        };
        raw.max(1)
    }
}

/// Serializable identity of an oracle instance: everything needed to replay
/// the family exactly.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChfsDescriptor {
    pub master_seed: u64,
    pub length_fn: LengthFunction,
}

/// A seeded family `{|φ_x⟩}` of Haar-random states indexed by bit strings.
///
/// Shared-read friendly: the memoization cache is internally synchronized
/// and insertion is first-writer-wins (racing writers compute identical
/// values, so the race is benign by construction).
#[derive(Debug)]
pub struct ChfsInstance {
    master_seed: u64,
    length_fn: LengthFunction,
    cache: Mutex<HashMap<BitString, PureState>>,
}

impl ChfsInstance {
    pub fn new(master_seed: u64, length_fn: LengthFunction) -> Self {
        ChfsInstance { master_seed, length_fn, cache: Mutex::new(HashMap::new()) }
    }

    pub fn master_seed(&self) -> u64 {
        self.master_seed
    }

    pub fn length_fn(&self) -> LengthFunction {
        self.length_fn
    }

    /// ℓ(|x|) for an index of the given length.
    pub fn output_qubits(&self, input_len: usize) -> usize {
        self.length_fn.eval(input_len)
    }

    pub fn descriptor(&self) -> ChfsDescriptor {
        ChfsDescriptor { master_seed: self.master_seed, length_fn: self.length_fn }
    }

    pub fn from_descriptor(d: &ChfsDescriptor) -> Self {
        ChfsInstance::new(d.master_seed, d.length_fn)
    }

    /// The family member `|φ_x⟩`: an ℓ(|x|)-qubit Haar state drawn from a
    /// child seed of `(master_seed, x)`, memoized.
    pub fn oracle_state(&self, x: &BitString) -> Result<PureState> {
        if x.is_empty() {
            return Err(Error::InvalidQuery("oracle index must be nonempty".into()));
        }
        if let Some(hit) = self.cache.lock().unwrap().get(x) {
            return Ok(hit.clone());
        }
        let qubits = self.length_fn.eval(x.len());
        ensure_qubits(qubits)?;
        let child_seed = mix64(self.master_seed ^ mix64(x.digest64()));
        let mut rng = LabRng::new(child_seed, ORACLE_STREAM);
        let state = haar_state(qubits, &mut rng)?;
        // First writer wins; racing computations are identical anyway.
        let mut cache = self.cache.lock().unwrap();
        Ok(cache.entry(x.clone()).or_insert(state).clone())
    }

    /// A unitary preparing `|φ_x⟩` from `|0…0⟩` on ℓ(|x|) qubits — the
    /// in-place form of the oracle used when a circuit writes the state onto
    /// an existing zeroed register instead of appending one.
    pub fn preparation_unitary(&self, x: &BitString) -> Result<UnitaryMatrix> {
        UnitaryMatrix::preparing(&self.oracle_state(x)?)
    }

    /// Number of memoized family members (diagnostics only).
    pub fn cached_len(&self) -> usize {
        self.cache.lock().unwrap().len()
    }
}

/// The reflection `S_x = |0⟩⟨φ_x,1| + |φ_x,1⟩⟨0| + I_⊥` on ℓ(|x|)+1 qubits,
/// where `|φ_x,1⟩ = |φ_x⟩|1⟩`. An involution: `S² = I`.
#[derive(Clone, Debug)]
pub struct SwapUnitary {
    unitary: UnitaryMatrix,
    x: BitString,
}

impl SwapUnitary {
    pub fn x(&self) -> &BitString {
        &self.x
    }

    pub fn unitary(&self) -> &UnitaryMatrix {
        &self.unitary
    }

    pub fn matrix(&self) -> &Array2<c64> {
        self.unitary.matrix()
    }

    pub fn qubits(&self) -> usize {
        self.unitary.qubits()
    }

    pub fn apply(&self, psi: &PureState) -> Result<PureState> {
        self.unitary.apply(psi)
    }

    pub fn conjugate(&self, rho: &DensityMatrix) -> Result<DensityMatrix> {
        self.unitary.conjugate(rho)
    }
}

/// Build the swap/reflection unitary for index `x`.
pub fn swap_unitary(inst: &ChfsInstance, x: &BitString) -> Result<SwapUnitary> {
    let phi = inst.oracle_state(x)?;
    let qubits = phi.qubits() + 1;
    ensure_qubits(qubits)?;
    let dim = 1usize << qubits;
    // Target |t⟩ = |φ_x⟩|1⟩: amplitudes of φ at odd indices (appended qubit
    // is least significant and set to 1), guaranteeing ⟨0…0|t⟩ = 0.
    let mut target = Array1::<c64>::zeros(dim);
    for (i, &a) in phi.amplitudes().iter().enumerate() {
        target[2 * i + 1] = a;
    }
    // S = I − |0⟩⟨0| − |t⟩⟨t| + |0⟩⟨t| + |t⟩⟨0|.
    let mut mat = Array2::<c64>::eye(dim);
    mat[[0, 0]] -= c64::new(1.0, 0.0);
    for i in 0..dim {
        for j in 0..dim {
            mat[[i, j]] -= target[i] * target[j].conj();
        }
    }
    for j in 0..dim {
        mat[[0, j]] += target[j].conj();
        mat[[j, 0]] += target[j];
    }
    Ok(SwapUnitary { unitary: UnitaryMatrix::new_unchecked(mat), x: x.clone() })
}

/// Split an n-qubit register as [X (x_qubits)][Z (rest)] and check bounds.
fn split_xz(total_qubits: usize, x_qubits: usize) -> Result<usize> {
    if x_qubits == 0 {
        return Err(Error::InvalidQuery("index register X must be nonempty".into()));
    }
    if x_qubits > total_qubits {
        return Err(Error::InvalidQuery(format!(
            "index register of {x_qubits} qubits exceeds the {total_qubits}-qubit state"
        )));
    }
    Ok(total_qubits - x_qubits)
}

/// Isometry query with quantum access on a pure state over `[X][Z]`:
/// appends `Y = ℓ(|X|)` qubits carrying `|φ_x⟩` coherently per branch,
/// returning a state over `[X][Y][Z]`.
pub fn isometry_query(inst: &ChfsInstance, psi: &PureState, x_qubits: usize) -> Result<PureState> {
    let z_qubits = split_xz(psi.qubits(), x_qubits)?;
    let y_qubits = inst.output_qubits(x_qubits);
    ensure_qubits(psi.qubits() + y_qubits)?;
    let (xd, yd, zd) = (1usize << x_qubits, 1usize << y_qubits, 1usize << z_qubits);
    let mut out = Array1::<c64>::zeros(xd * yd * zd);
    for xv in 0..xd {
        // Skip index branches with no amplitude so definite-index queries
        // touch a single family member.
        let weight: f64 = (0..zd).map(|zv| psi.amp(xv * zd + zv).norm_sqr()).sum();
        if weight < 1e-30 {
            continue;
        }
        let phi = inst.oracle_state(&BitString::from_value(xv as u64, x_qubits)?)?;
        for (yv, &p) in phi.amplitudes().iter().enumerate() {
            for zv in 0..zd {
                out[(xv * yd + yv) * zd + zv] = psi.amp(xv * zd + zv) * p;
            }
        }
    }
    PureState::new(out)
}

/// Isometry query on a density matrix over `[X][Z]`. With `classical_access`
/// the index register is measured (dephased) first, exactly as if the
/// querier were handed the post-measurement mixture.
pub fn isometry_query_dm(
    inst: &ChfsInstance,
    rho: &DensityMatrix,
    x_qubits: usize,
    classical_access: bool,
) -> Result<DensityMatrix> {
    let z_qubits = split_xz(rho.qubits(), x_qubits)?;
    let y_qubits = inst.output_qubits(x_qubits);
    ensure_qubits(rho.qubits() + y_qubits)?;
    let rho = if classical_access {
        let targets: Vec<usize> = (0..x_qubits).collect();
        dephase_qubits(rho, &targets)?
    } else {
        rho.clone()
    };
    let (xd, yd, zd) = (1usize << x_qubits, 1usize << y_qubits, 1usize << z_qubits);
    let dim_in = xd * zd;
    // Materialize the family members for index blocks with support.
    let mut phis: Vec<Option<PureState>> = vec![None; xd];
    for i in 0..dim_in {
        let xi = i / zd;
        if phis[xi].is_none()
            && rho.matrix().row(i).iter().any(|v| v.norm_sqr() >= 1e-60)
        {
            phis[xi] = Some(inst.oracle_state(&BitString::from_value(xi as u64, x_qubits)?)?);
        }
    }
    let mut out = Array2::<c64>::zeros((dim_in * yd, dim_in * yd));
    for i in 0..dim_in {
        let (xi, zi) = (i / zd, i % zd);
        let Some(pi) = phis[xi].as_ref() else { continue };
        for j in 0..dim_in {
            let v = rho.matrix()[[i, j]];
            if v.norm_sqr() < 1e-60 {
                continue;
            }
            let (xj, zj) = (j / zd, j % zd);
            let pj = phis[xj].as_ref().expect("support column has a state");
            for yi in 0..yd {
                let ai = pi.amp(yi);
                if ai.norm_sqr() < 1e-60 {
                    continue;
                }
                for yj in 0..yd {
                    out[[(xi * yd + yi) * zd + zi, (xj * yd + yj) * zd + zj]] +=
                        v * ai * pj.amp(yj).conj();
                }
            }
        }
    }
    Ok(DensityMatrix::new_unchecked(out))
}

/// Apply per-index blocks on the Y register of a `[X][Y][Z]` vector:
/// `out = Σ_x |x⟩⟨x| ⊗ B_x ⊗ I_Z · amps`, where `blocks[x] = None` means
/// the identity block.
fn controlled_apply_vec(
    amps: &Array1<c64>,
    y_qubits: usize,
    z_qubits: usize,
    blocks: &[Option<Array2<c64>>],
) -> Array1<c64> {
    let (yd, zd) = (1usize << y_qubits, 1usize << z_qubits);
    let mut out = Array1::<c64>::zeros(amps.len());
    for (xv, block) in blocks.iter().enumerate() {
        match block {
            None => {
                for k in 0..yd * zd {
                    let idx = xv * yd * zd + k;
                    out[idx] = amps[idx];
                }
            }
            Some(b) => {
                for zv in 0..zd {
                    for yi in 0..yd {
                        let mut acc = c64::new(0.0, 0.0);
                        for yj in 0..yd {
                            acc += b[[yi, yj]] * amps[(xv * yd + yj) * zd + zv];
                        }
                        out[(xv * yd + yi) * zd + zv] = acc;
                    }
                }
            }
        }
    }
    out
}

fn check_unitarized_layout(inst: &ChfsInstance, total: usize, x_qubits: usize) -> Result<usize> {
    if x_qubits == 0 {
        return Err(Error::InvalidQuery("index register X must be nonempty".into()));
    }
    let y_qubits = inst.output_qubits(x_qubits) + 1;
    if x_qubits + y_qubits > total {
        return Err(Error::InvalidQuery(format!(
            "state has {total} qubits but X·Y alone needs {} (ℓ+1 = {y_qubits})",
            x_qubits + y_qubits
        )));
    }
    Ok(y_qubits)
}

/// Unitarized query with quantum access on a pure state over `[X][Y][Z]`
/// with `|Y| = ℓ(|X|)+1`: applies `Σ_x |x⟩⟨x| ⊗ S_x` blockwise, never
/// materializing the exponentially large controlled sum.
pub fn unitarized_query(
    inst: &ChfsInstance,
    psi: &PureState,
    x_qubits: usize,
) -> Result<PureState> {
    let y_qubits = check_unitarized_layout(inst, psi.qubits(), x_qubits)?;
    let z_qubits = psi.qubits() - x_qubits - y_qubits;
    let (xd, yzd) = (1usize << x_qubits, 1usize << (y_qubits + z_qubits));
    let mut blocks: Vec<Option<Array2<c64>>> = Vec::with_capacity(xd);
    for xv in 0..xd {
        let base = xv * yzd;
        let weight: f64 = (0..yzd).map(|k| psi.amp(base + k).norm_sqr()).sum();
        if weight < 1e-30 {
            blocks.push(None); // empty slice: block is irrelevant
        } else {
            let s = swap_unitary(inst, &BitString::from_value(xv as u64, x_qubits)?)?;
            blocks.push(Some(s.matrix().clone()));
        }
    }
    let out = controlled_apply_vec(psi.amplitudes(), y_qubits, z_qubits, &blocks);
    PureState::new(out)
}

/// Unitarized query on a density matrix over `[X][Y][Z]`. With
/// `classical_access` the index register is measured (dephased) first.
pub fn unitarized_query_dm(
    inst: &ChfsInstance,
    rho: &DensityMatrix,
    x_qubits: usize,
    classical_access: bool,
) -> Result<DensityMatrix> {
    let y_qubits = check_unitarized_layout(inst, rho.qubits(), x_qubits)?;
    let z_qubits = rho.qubits() - x_qubits - y_qubits;
    let rho = if classical_access {
        let targets: Vec<usize> = (0..x_qubits).collect();
        dephase_qubits(rho, &targets)?
    } else {
        rho.clone()
    };
    let xd = 1usize << x_qubits;
    let mut blocks: Vec<Option<Array2<c64>>> = Vec::with_capacity(xd);
    for xv in 0..xd {
        let s = swap_unitary(inst, &BitString::from_value(xv as u64, x_qubits)?)?;
        blocks.push(Some(s.matrix().clone()));
    }
    // Conjugate by the controlled sum via two column passes: columns of ρ,
    // then columns of the adjoint.
    let dim = rho.dim();
    let pass = |mat: &Array2<c64>| -> Array2<c64> {
        let mut out = Array2::<c64>::zeros((dim, dim));
        for col in 0..dim {
            let v = mat.column(col).to_owned();
            let new_v = controlled_apply_vec(&v, y_qubits, z_qubits, &blocks);
            out.column_mut(col).assign(&new_v);
        }
        out
    };
    let half = pass(rho.matrix());
    let half_adj = adjoint_local(&half);
    let full = pass(&half_adj);
    Ok(DensityMatrix::new_unchecked(adjoint_local(&full)))
}

fn adjoint_local(m: &Array2<c64>) -> Array2<c64> {
    let mut out = Array2::zeros((m.ncols(), m.nrows()));
    for ((i, j), v) in m.indexed_iter() {
        out[[j, i]] = v.conj();
    }
    out
}

/// Materialize the full controlled sum `Σ_x |x⟩⟨x| ⊗ S_x` on
/// `|X| + ℓ(|X|) + 1` qubits. Guarded to small index registers — the
/// blockwise query paths above cover everything else.
pub fn controlled_swap_sum(inst: &ChfsInstance, x_qubits: usize) -> Result<UnitaryMatrix> {
    if x_qubits == 0 || x_qubits > 6 {
        return Err(Error::InvalidQuery(format!(
            "controlled sum is materialized only for 1 ≤ |X| ≤ 6 (got {x_qubits})"
        )));
    }
    let y_qubits = inst.output_qubits(x_qubits) + 1;
    ensure_qubits(x_qubits + y_qubits)?;
    let (xd, yd) = (1usize << x_qubits, 1usize << y_qubits);
    let mut mat = Array2::<c64>::zeros((xd * yd, xd * yd));
    for xv in 0..xd {
        let s = swap_unitary(inst, &BitString::from_value(xv as u64, x_qubits)?)?;
        for yi in 0..yd {
            for yj in 0..yd {
                mat[[xv * yd + yi, xv * yd + yj]] = s.matrix()[[yi, yj]];
            }
        }
    }
    Ok(UnitaryMatrix::new_unchecked(mat))
}

/// Universal query on a density matrix over `[Λ][X][Z]`: measures the
/// length register Λ, then dispatches the isometry at the observed length
/// λ using the first λ qubits of X as the index.
///
/// The appended register `Y` has the type-stable width ℓ(|X|) (the maximum
/// over possible outcomes, by monotonicity of ℓ); a branch at length λ
/// writes `|φ⟩` on the leading ℓ(λ) qubits of Y and leaves the rest `|0⟩`.
/// Output layout is `[Λ][X][Y][Z]`. Branches that measure λ = 0 or λ > |X|
/// are rejected — the promise is that Λ holds a valid length.
pub fn universal_query(
    inst: &ChfsInstance,
    rho: &DensityMatrix,
    lambda_qubits: usize,
    x_qubits: usize,
) -> Result<DensityMatrix> {
    let total = rho.qubits();
    if lambda_qubits == 0 {
        return Err(Error::InvalidQuery("length register Λ must be nonempty".into()));
    }
    if x_qubits == 0 || lambda_qubits + x_qubits > total {
        return Err(Error::InvalidQuery(format!(
            "registers Λ ({lambda_qubits}) + X ({x_qubits}) exceed the {total}-qubit state"
        )));
    }
    let z_qubits = total - lambda_qubits - x_qubits;
    let y_qubits = inst.output_qubits(x_qubits);
    ensure_qubits(total + y_qubits)?;
    let (yd, zd) = (1usize << y_qubits, 1usize << z_qubits);
    let dim_in = 1usize << total;
    let dim_out = dim_in * yd;

    let lambda_targets: Vec<usize> = (0..lambda_qubits).collect();
    let branches = measure_qubits(rho, &lambda_targets)?;
    let mut out = Array2::<c64>::zeros((dim_out, dim_out));
    for branch in branches {
        let lambda = branch.outcome as usize;
        if lambda == 0 || lambda > x_qubits {
            return Err(Error::InvalidQuery(format!(
                "measured length λ = {lambda} outside 1..={x_qubits} (branch probability {:.3e})",
                branch.probability
            )));
        }
        let ell = inst.output_qubits(lambda);
        let pad = y_qubits - ell;
        let mat = branch.state.matrix();
        let prefix_of = |idx: usize| -> u64 {
            ((idx >> (z_qubits + x_qubits - lambda)) & ((1 << lambda) - 1)) as u64
        };
        // Materialize the family members this branch touches.
        let mut phis: HashMap<u64, PureState> = HashMap::new();
        for i in 0..dim_in {
            let pref = prefix_of(i);
            if !phis.contains_key(&pref)
                && mat.row(i).iter().any(|v| v.norm_sqr() >= 1e-60)
            {
                phis.insert(pref, inst.oracle_state(&BitString::from_value(pref, lambda)?)?);
            }
        }
        let weight = c64::new(branch.probability, 0.0);
        for i in 0..dim_in {
            let Some(phi_i) = phis.get(&prefix_of(i)) else { continue };
            let (top_i, zi) = (i >> z_qubits, i & (zd - 1));
            for j in 0..dim_in {
                let v = mat[[i, j]];
                if v.norm_sqr() < 1e-60 {
                    continue;
                }
                let phi_j = phis.get(&prefix_of(j)).expect("support column has a state");
                let (top_j, zj) = (j >> z_qubits, j & (zd - 1));
                for yi_phi in 0..(1usize << ell) {
                    let ai = phi_i.amp(yi_phi);
                    if ai.norm_sqr() < 1e-60 {
                        continue;
                    }
                    let yi = yi_phi << pad;
                    for yj_phi in 0..(1usize << ell) {
                        let yj = yj_phi << pad;
                        out[[(top_i * yd + yi) * zd + zi, (top_j * yd + yj) * zd + zj]] +=
                            weight * v * ai * phi_j.amp(yj_phi).conj();
                    }
                }
            }
        }
    }
    Ok(DensityMatrix::new_unchecked(out))
}
