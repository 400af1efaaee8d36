//! Exact finite-dimensional quantum linear algebra.
//!
//! States, unitaries, Haar sampling, distances, partial traces, and
//! register-targeted operations, all over dense complex matrices. Everything
//! here is an exact calculation up to double precision — no sampling is
//! hidden inside these primitives; randomness only enters through the
//! explicit `LabRng` arguments of the Haar samplers.
//!
//! Conventions used crate-wide:
//! - Qubit 0 is the leftmost / most significant bit of a computational basis
//!   index, so `tensor(a, b)` places `a` on the leading qubits.
//! - `trace_distance` is ½‖·‖₁; functions that return a 1-norm say so.
//! - Structural identities are enforced at [`TOL_STRUCTURAL`], derived
//!   quantities compared at [`TOL_DERIVED`].

mod distance;
mod haar;
mod registers;
mod state;
mod subsystem;
mod unitary;

pub use distance::{
    closest_pure_state, one_norm_hermitian, trace_distance, trace_distance_pure, ClosestPure,
};
pub use haar::{haar_state, haar_unitary};
pub use registers::{
    apply_on_qubits_dm, apply_on_qubits_vec, dephase_qubits, embed_on_qubits, measure_qubits,
    measure_qubits_pure, projector_expectation_bits, MeasurementBranch, PureMeasurementBranch,
};
pub use state::{DensityMatrix, PureState};
pub use subsystem::{partial_trace, trace_out_qubits, SubsystemSpec};
pub use unitary::{operator_norm_distance, UnitaryMatrix};
pub(crate) use unitary::unitarity_defect;

use ndarray::Array2;
use ndarray_linalg::c64;

use crate::error::{Error, Result};

/// Hard cap on qubit counts for dense simulation (4096-dimensional vectors).
/// Dense eigendecompositions stay sub-second below this size.
pub const MAX_QUBITS: usize = 12;

/// Tolerance for structural invariants (normalization, Hermiticity, trace).
pub const TOL_STRUCTURAL: f64 = 1e-10;

/// Tolerance for derived equalities (quantities computed two ways).
pub const TOL_DERIVED: f64 = 1e-8;

/// Frobenius-norm tolerance for unitarity.
pub const TOL_UNITARY: f64 = 1e-8;

/// Validate a qubit count against the dense-simulation cap.
pub fn ensure_qubits(qubits: usize) -> Result<()> {
    if qubits > MAX_QUBITS {
        Err(Error::DimensionOverflow { qubits, cap: MAX_QUBITS })
    } else {
        Ok(())
    }
}

/// Number of qubits for a dimension, or an error if it is not a power of two.
pub(crate) fn qubits_for_dim(dim: usize) -> Result<usize> {
    if dim == 0 || !dim.is_power_of_two() {
        return Err(Error::InvalidArgument(format!(
            "dimension {dim} is not a power of two"
        )));
    }
    Ok(dim.trailing_zeros() as usize)
}

/// Conjugate transpose.
pub(crate) fn adjoint(m: &Array2<c64>) -> Array2<c64> {
    let mut out = Array2::zeros((m.ncols(), m.nrows()));
    for ((i, j), v) in m.indexed_iter() {
        out[[j, i]] = v.conj();
    }
    out
}

/// Kronecker product of two dense complex matrices (`a` on the leading
/// factor).
pub(crate) fn kron_mat(a: &Array2<c64>, b: &Array2<c64>) -> Array2<c64> {
    let (ar, ac) = a.dim();
    let (br, bc) = b.dim();
    let mut out = Array2::zeros((ar * br, ac * bc));
    for ((i, j), &av) in a.indexed_iter() {
        if av == c64::new(0.0, 0.0) {
            continue;
        }
        for ((k, l), &bv) in b.indexed_iter() {
            out[[i * br + k, j * bc + l]] = av * bv;
        }
    }
    out
}
