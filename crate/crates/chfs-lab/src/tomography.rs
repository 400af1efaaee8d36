//! Process reconstruction of small black-box unitaries.
//!
//! The simulator grants noiseless state access, so statistical process
//! tomography is beside the point: we read the unitary off column by column
//! (one query per computational basis state) and canonicalize the global
//! phase. What downstream algorithms actually consume is the diamond-distance
//! guarantee, so `Perturbed` mode preserves exactly that — it injects a
//! random unitary perturbation of known operator-norm size and asserts the
//! declared `ε` bound on every run.

use ndarray::{Array1, Array2};
use ndarray_linalg::c64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hilbert::{
    haar_unitary, operator_norm_distance, unitarity_defect, qubits_for_dim, UnitaryMatrix,
};
use crate::rng::LabRng;

/// Tolerance on the column Gram matrix before the black box is rejected as
/// non-unitary.
const GRAM_TOL: f64 = 1e-6;

/// How the reconstruction degrades the answer.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum NoiseMode {
    /// Return the black box exactly (up to global phase).
    Exact,
    /// Compose with a random unitary at operator-norm distance ε/4,
    /// modeling the accuracy loss of a real tomography procedure while
    /// keeping the diamond-distance contract.
    Perturbed,
}

/// A reconstructed process together with its accuracy contract: the induced
/// channel is within diamond distance `epsilon` of the black box with
/// probability at least `1 − delta` over the reconstruction randomness.
/// (Here the guarantee is deterministic; `delta` is carried so callers can
/// budget it the way the analysis does.)
#[derive(Clone, Debug)]
pub struct TomographyResult {
    pub reconstructed: UnitaryMatrix,
    pub epsilon: f64,
    pub delta: f64,
    pub queries_used: usize,
}

/// Black-box access: applies an unknown operator to a state vector. Must be
/// re-entrant; the reconstruction calls it once per basis column.
pub type BlackBox<'a> = &'a dyn Fn(&Array1<c64>) -> Result<Array1<c64>>;

/// Reconstruct a `dim × dim` unitary from black-box applications, one query
/// per computational basis column. The global phase is fixed by making the
/// first nonzero amplitude of column 0 real and positive — channels are
/// phase-invariant, and a canonical representative simplifies equality
/// tests.
pub fn reconstruct_unitary(
    black_box: BlackBox,
    dim: usize,
    epsilon: f64,
    delta: f64,
    noise_mode: NoiseMode,
    rng: &mut LabRng,
) -> Result<TomographyResult> {
    let qubits = qubits_for_dim(dim)?;
    if dim > 64 {
        return Err(Error::InvalidArgument(format!(
            "tomography is desk-scale only: dim {dim} exceeds 64"
        )));
    }
    for (name, v) in [("epsilon", epsilon), ("delta", delta)] {
        if !(0.0..1.0).contains(&v) || v == 0.0 {
            return Err(Error::InvalidArgument(format!("{name} = {v} outside (0,1)")));
        }
    }

    // Query the black box on each basis column.
    let mut cols = Array2::<c64>::zeros((dim, dim));
    for j in 0..dim {
        let mut basis = Array1::<c64>::zeros(dim);
        basis[j] = c64::new(1.0, 0.0);
        let out = black_box(&basis)?;
        if out.len() != dim {
            return Err(Error::DimensionMismatch { expected: dim, got: out.len() });
        }
        cols.column_mut(j).assign(&out);
    }

    // A unitary's columns form an orthonormal set; anything else means the
    // callback is not applying a unitary.
    let defect = unitarity_defect(&cols);
    if defect > GRAM_TOL {
        return Err(Error::NonUnitaryBlackBox(defect));
    }

    // Canonical global phase.
    let anchor = cols
        .column(0)
        .iter()
        .copied()
        .find(|z| z.norm() > 1e-9)
        .ok_or(Error::NonUnitaryBlackBox(1.0))?;
    let phase = anchor.conj() / anchor.norm();
    cols.mapv_inplace(|z| z * phase);
    let exact = UnitaryMatrix::new_unchecked(cols);

    let reconstructed = match noise_mode {
        NoiseMode::Exact => exact,
        NoiseMode::Perturbed => {
            // P = W · diag(1, …, 1, e^{iα}) · W† with |e^{iα} − 1| = ε/4,
            // so ‖P − I‖_op = ε/4 and the phase-minimized distance is
            // smaller still; the diamond bound 2·‖·‖_op lands within ε.
            let alpha = 2.0 * (epsilon / 8.0).asin();
            let w = haar_unitary(qubits, rng)?;
            let mut d = Array2::<c64>::eye(dim);
            d[[dim - 1, dim - 1]] = c64::from_polar(1.0, alpha);
            let p = w.matrix().dot(&d).dot(w.adjoint().matrix());
            let perturbed =
                UnitaryMatrix::new_unchecked(p.dot(exact.matrix()));
            let bound = diamond_distance_bound(&exact, &perturbed)?;
            assert!(
                bound <= epsilon + 1e-12,
                "perturbed reconstruction broke its contract: bound {bound} > ε {epsilon}"
            );
            perturbed
        }
    };

    Ok(TomographyResult { reconstructed, epsilon, delta, queries_used: dim })
}

/// Upper bound on the diamond distance between the channels induced by two
/// unitaries: twice the phase-minimized operator-norm distance. Always ≥ the
/// true diamond distance, and cheap enough to evaluate on every
/// reconstruction.
pub fn diamond_distance_bound(u: &UnitaryMatrix, v: &UnitaryMatrix) -> Result<f64> {
    Ok(2.0 * operator_norm_distance(u, v)?)
}
