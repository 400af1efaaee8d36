//! Register surgery: applying operators to selected qubits, dephasing, and
//! computational-basis measurement of sub-registers.
//!
//! Qubit 0 is the most significant bit of the basis index throughout, so
//! qubit `q` of an `n`-qubit register carries bit weight `2^(n−1−q)`.
//! Multi-qubit target lists are read the same way: `targets[0]` is the most
//! significant bit of the local operator index and of measurement outcomes.

use ndarray::{Array1, Array2};
use ndarray_linalg::c64;

use super::state::{DensityMatrix, PureState};
use super::unitary::UnitaryMatrix;
use super::adjoint;
use crate::error::{Error, Result};

fn check_targets(n: usize, targets: &[usize]) -> Result<Vec<usize>> {
    if targets.is_empty() {
        return Err(Error::InvalidSubsystem("empty target list".into()));
    }
    let mut seen = vec![false; n];
    for &q in targets {
        if q >= n {
            return Err(Error::InvalidSubsystem(format!(
                "qubit {q} out of range for {n} qubits"
            )));
        }
        if seen[q] {
            return Err(Error::InvalidSubsystem(format!("duplicate target qubit {q}")));
        }
        seen[q] = true;
    }
    // Bit shift of each target in the flat index.
    Ok(targets.iter().map(|&q| n - 1 - q).collect())
}

/// Embed a local index (big-endian over `shifts`) into a base flat index.
#[inline]
fn scatter(base: usize, local: usize, shifts: &[usize]) -> usize {
    let k = shifts.len();
    let mut idx = base;
    for (t, &s) in shifts.iter().enumerate() {
        if (local >> (k - 1 - t)) & 1 == 1 {
            idx |= 1 << s;
        }
    }
    idx
}

/// Apply a k-qubit unitary to the listed target qubits of an n-qubit pure
/// state, identity elsewhere.
pub fn apply_on_qubits_vec(
    op: &UnitaryMatrix,
    targets: &[usize],
    psi: &PureState,
) -> Result<PureState> {
    let n = psi.qubits();
    let shifts = check_targets(n, targets)?;
    if op.qubits() != targets.len() {
        return Err(Error::DimensionMismatch {
            expected: 1 << targets.len(),
            got: op.dim(),
        });
    }
    let out = apply_on_columns(op.matrix(), &shifts, psi.amplitudes(), n);
    Ok(PureState::from_parts_unchecked(out, n))
}

fn apply_on_columns(
    op: &Array2<c64>,
    shifts: &[usize],
    amps: &Array1<c64>,
    n: usize,
) -> Array1<c64> {
    let dim = 1usize << n;
    let k = shifts.len();
    let local_dim = 1usize << k;
    let mask: usize = shifts.iter().map(|&s| 1usize << s).sum();
    let mut out = Array1::<c64>::zeros(dim);
    let mut local = vec![c64::new(0.0, 0.0); local_dim];
    for base in 0..dim {
        if base & mask != 0 {
            continue;
        }
        for (l, slot) in local.iter_mut().enumerate() {
            *slot = amps[scatter(base, l, shifts)];
        }
        for i in 0..local_dim {
            let mut acc = c64::new(0.0, 0.0);
            for (j, &v) in local.iter().enumerate() {
                acc += op[[i, j]] * v;
            }
            out[scatter(base, i, shifts)] = acc;
        }
    }
    out
}

/// Apply a k-qubit unitary to the listed target qubits of a density matrix:
/// `(U ⊗ I) ρ (U ⊗ I)†` without materializing the embedded operator.
pub fn apply_on_qubits_dm(
    op: &UnitaryMatrix,
    targets: &[usize],
    rho: &DensityMatrix,
) -> Result<DensityMatrix> {
    let n = rho.qubits();
    let shifts = check_targets(n, targets)?;
    if op.qubits() != targets.len() {
        return Err(Error::DimensionMismatch {
            expected: 1 << targets.len(),
            got: op.dim(),
        });
    }
    let dim = rho.dim();
    // Left multiply: transform each column of ρ, then repeat on the adjoint
    // to pick up the right factor.
    let mut half = Array2::<c64>::zeros((dim, dim));
    for j in 0..dim {
        let col = rho.matrix().column(j).to_owned();
        let new_col = apply_on_columns(op.matrix(), &shifts, &col, n);
        half.column_mut(j).assign(&new_col);
    }
    let half_adj = adjoint(&half);
    let mut full = Array2::<c64>::zeros((dim, dim));
    for j in 0..dim {
        let col = half_adj.column(j).to_owned();
        let new_col = apply_on_columns(op.matrix(), &shifts, &col, n);
        full.column_mut(j).assign(&new_col);
    }
    Ok(DensityMatrix::new_unchecked(adjoint(&full)))
}

/// Fully dephase the listed qubits in the computational basis: zero every
/// matrix element whose row and column indices disagree on a target bit.
/// Equivalent to measuring those qubits and forgetting the outcome.
pub fn dephase_qubits(rho: &DensityMatrix, targets: &[usize]) -> Result<DensityMatrix> {
    let n = rho.qubits();
    let shifts = check_targets(n, targets)?;
    let mask: usize = shifts.iter().map(|&s| 1usize << s).sum();
    let dim = rho.dim();
    let mut out = rho.matrix().clone();
    for i in 0..dim {
        for j in 0..dim {
            if (i ^ j) & mask != 0 {
                out[[i, j]] = c64::new(0.0, 0.0);
            }
        }
    }
    Ok(DensityMatrix::new_unchecked(out))
}

/// Materialize `op` acting on the listed qubits of an `n`-qubit register as
/// a full `2^n × 2^n` unitary (identity elsewhere). Dense and O(4^n) — meant
/// for desk-scale circuit assembly, not asymptotics.
pub fn embed_on_qubits(
    op: &UnitaryMatrix,
    targets: &[usize],
    n: usize,
) -> Result<UnitaryMatrix> {
    check_targets(n, targets)?;
    let dim = 1usize << n;
    let mut full = Array2::<c64>::zeros((dim, dim));
    for j in 0..dim {
        let mut basis = Array1::<c64>::zeros(dim);
        basis[j] = c64::new(1.0, 0.0);
        let col = apply_on_qubits_vec(
            op,
            targets,
            &PureState::from_parts_unchecked(basis, n),
        )?;
        full.column_mut(j).assign(col.amplitudes());
    }
    Ok(UnitaryMatrix::new_unchecked(full))
}

/// One outcome branch of a computational-basis measurement on a density
/// matrix.
#[derive(Clone, Debug)]
pub struct MeasurementBranch {
    /// Measured bits, big-endian over the target list.
    pub outcome: u64,
    pub probability: f64,
    /// Post-measurement state, renormalized (still on all n qubits, with the
    /// measured qubits collapsed).
    pub state: DensityMatrix,
}

/// Measure the listed qubits of ρ in the computational basis. Returns the
/// branches with probability above 1e-12, each renormalized; probabilities
/// sum to 1 within tolerance of the discarded mass.
pub fn measure_qubits(rho: &DensityMatrix, targets: &[usize]) -> Result<Vec<MeasurementBranch>> {
    let n = rho.qubits();
    let shifts = check_targets(n, targets)?;
    let mask: usize = shifts.iter().map(|&s| 1usize << s).sum();
    let dim = rho.dim();
    let local_dim = 1usize << targets.len();
    let mut branches = Vec::new();
    for outcome in 0..local_dim {
        let pattern = scatter(0, outcome, &shifts);
        let mut prob = 0.0f64;
        for i in 0..dim {
            if i & mask == pattern {
                prob += rho.matrix()[[i, i]].re;
            }
        }
        if prob <= 1e-12 {
            continue;
        }
        let mut mat = Array2::<c64>::zeros((dim, dim));
        for i in 0..dim {
            if i & mask != pattern {
                continue;
            }
            for j in 0..dim {
                if j & mask != pattern {
                    continue;
                }
                mat[[i, j]] = rho.matrix()[[i, j]] / prob;
            }
        }
        branches.push(MeasurementBranch {
            outcome: outcome as u64,
            probability: prob,
            state: DensityMatrix::new_unchecked(mat),
        });
    }
    Ok(branches)
}

/// One outcome branch of a computational-basis measurement on a pure state.
#[derive(Clone, Debug)]
pub struct PureMeasurementBranch {
    /// Measured bits, big-endian over the target list.
    pub outcome: u64,
    pub probability: f64,
    /// Post-measurement state, renormalized.
    pub state: PureState,
}

/// Measure the listed qubits of a pure state in the computational basis.
pub fn measure_qubits_pure(
    psi: &PureState,
    targets: &[usize],
) -> Result<Vec<PureMeasurementBranch>> {
    let n = psi.qubits();
    let shifts = check_targets(n, targets)?;
    let mask: usize = shifts.iter().map(|&s| 1usize << s).sum();
    let dim = psi.dim();
    let local_dim = 1usize << targets.len();
    let mut branches = Vec::new();
    for outcome in 0..local_dim {
        let pattern = scatter(0, outcome, &shifts);
        let mut prob = 0.0f64;
        for i in 0..dim {
            if i & mask == pattern {
                prob += psi.amp(i).norm_sqr();
            }
        }
        if prob <= 1e-12 {
            continue;
        }
        let scale = c64::new(1.0 / prob.sqrt(), 0.0);
        let mut amps = Array1::<c64>::zeros(dim);
        for i in 0..dim {
            if i & mask == pattern {
                amps[i] = psi.amp(i) * scale;
            }
        }
        branches.push(PureMeasurementBranch {
            outcome: outcome as u64,
            probability: prob,
            state: PureState::from_parts_unchecked(amps, n),
        });
    }
    Ok(branches)
}

/// Probability that measuring the listed qubits yields the given bit pattern
/// (big-endian over the target list): `Tr(Π ρ)`.
pub fn projector_expectation_bits(
    rho: &DensityMatrix,
    targets: &[usize],
    bits: u64,
) -> Result<f64> {
    let n = rho.qubits();
    let shifts = check_targets(n, targets)?;
    if bits >= (1u64 << targets.len()) {
        return Err(Error::InvalidArgument(format!(
            "outcome {bits} out of range for {} measured qubits",
            targets.len()
        )));
    }
    let mask: usize = shifts.iter().map(|&s| 1usize << s).sum();
    let pattern = scatter(0, bits as usize, &shifts);
    let mut prob = 0.0f64;
    for i in 0..rho.dim() {
        if i & mask == pattern {
            prob += rho.matrix()[[i, i]].re;
        }
    }
    Ok(prob)
}
