//! Unitary operators, composition, and the phase-invariant operator-norm
//! distance.

use ndarray::{Array1, Array2};
use ndarray_linalg::{c64, Eig};

use super::state::{DensityMatrix, PureState};
use super::{adjoint, ensure_qubits, kron_mat, qubits_for_dim, TOL_UNITARY};
use crate::error::{Error, Result};

/// A unitary on `qubits` qubits. Construction checks `‖U†U − I‖_F` within
/// [`TOL_UNITARY`].
#[derive(Clone, Debug)]
pub struct UnitaryMatrix {
    mat: Array2<c64>,
    qubits: usize,
}

impl UnitaryMatrix {
    pub fn new(mat: Array2<c64>) -> Result<Self> {
        if mat.nrows() != mat.ncols() {
            return Err(Error::DimensionMismatch { expected: mat.nrows(), got: mat.ncols() });
        }
        let qubits = qubits_for_dim(mat.nrows())?;
        ensure_qubits(qubits)?;
        let defect = unitarity_defect(&mat);
        if defect > TOL_UNITARY {
            return Err(Error::NotUnitary(defect));
        }
        Ok(UnitaryMatrix { mat, qubits })
    }

    /// Internal fast path for operators unitary by construction.
    pub(crate) fn new_unchecked(mat: Array2<c64>) -> Self {
        let qubits = qubits_for_dim(mat.nrows()).expect("power-of-two dimension");
        UnitaryMatrix { mat, qubits }
    }

    pub fn identity(qubits: usize) -> Result<Self> {
        ensure_qubits(qubits)?;
        let dim = 1usize << qubits;
        Ok(UnitaryMatrix {
            mat: Array2::eye(dim).mapv(|v: f64| c64::new(v, 0.0)),
            qubits,
        })
    }

    pub fn qubits(&self) -> usize {
        self.qubits
    }

    pub fn dim(&self) -> usize {
        self.mat.nrows()
    }

    pub fn matrix(&self) -> &Array2<c64> {
        &self.mat
    }

    pub fn adjoint(&self) -> UnitaryMatrix {
        UnitaryMatrix { mat: adjoint(&self.mat), qubits: self.qubits }
    }

    /// `U|ψ⟩`.
    pub fn apply(&self, psi: &PureState) -> Result<PureState> {
        if psi.dim() != self.dim() {
            return Err(Error::DimensionMismatch { expected: self.dim(), got: psi.dim() });
        }
        let out = self.mat.dot(psi.amplitudes());
        Ok(PureState::from_parts_unchecked(out, self.qubits))
    }

    /// `UρU†`.
    pub fn conjugate(&self, rho: &DensityMatrix) -> Result<DensityMatrix> {
        if rho.dim() != self.dim() {
            return Err(Error::DimensionMismatch { expected: self.dim(), got: rho.dim() });
        }
        let out = self.mat.dot(rho.matrix()).dot(&adjoint(&self.mat));
        Ok(DensityMatrix::new_unchecked(out))
    }

    /// `self · other` (apply `other` first).
    pub fn compose(&self, other: &UnitaryMatrix) -> Result<UnitaryMatrix> {
        if self.dim() != other.dim() {
            return Err(Error::DimensionMismatch { expected: self.dim(), got: other.dim() });
        }
        Ok(UnitaryMatrix { mat: self.mat.dot(&other.mat), qubits: self.qubits })
    }

    /// Tensor product, `self` on the leading qubits.
    pub fn tensor(&self, other: &UnitaryMatrix) -> Result<UnitaryMatrix> {
        ensure_qubits(self.qubits + other.qubits)?;
        Ok(UnitaryMatrix {
            mat: kron_mat(&self.mat, &other.mat),
            qubits: self.qubits + other.qubits,
        })
    }

    /// A unitary whose first column is `psi`: maps `|0…0⟩ ↦ |ψ⟩`.
    ///
    /// Built as a Householder reflection `I − 2vv†/‖v‖²` with
    /// `v = |0⟩ − e^{−iα}|ψ⟩` (α the phase of `⟨0|ψ⟩`), then phase-rotated so
    /// column 0 equals ψ exactly rather than up to the reflection's phase.
    /// When `⟨0|ψ⟩ = 0` the reflection degenerates; the swap
    /// `|0⟩⟨ψ| + |ψ⟩⟨0| + (I − |0⟩⟨0| − |ψ⟩⟨ψ|)` is used instead.
    pub fn preparing(psi: &PureState) -> Result<UnitaryMatrix> {
        let dim = psi.dim();
        let qubits = psi.qubits();
        let a0 = psi.amp(0);
        let eye = Array2::<c64>::eye(dim);
        if a0.norm() < 1e-12 {
            // ⟨0|ψ⟩ = 0: the two-dimensional swap is already unitary.
            let mut mat = eye.clone();
            for i in 0..dim {
                for j in 0..dim {
                    let e0i = if i == 0 { c64::new(1.0, 0.0) } else { c64::new(0.0, 0.0) };
                    let e0j = if j == 0 { c64::new(1.0, 0.0) } else { c64::new(0.0, 0.0) };
                    mat[[i, j]] += e0i * psi.amp(j).conj() + psi.amp(i) * e0j
                        - e0i * e0j
                        - psi.amp(i) * psi.amp(j).conj();
                }
            }
            return Ok(UnitaryMatrix { mat, qubits });
        }
        let phase = a0 / c64::new(a0.norm(), 0.0);
        // v = |0⟩ − conj(phase)·|ψ⟩, so the reflection maps |0⟩ to
        // conj(phase)·|ψ⟩ (real positive overlap with |0⟩).
        let mut v: Array1<c64> = psi.amplitudes().mapv(|a| -a * phase.conj());
        v[0] += c64::new(1.0, 0.0);
        let vnorm_sq: f64 = v.iter().map(|x| x.norm_sqr()).sum();
        let mut mat = eye;
        if vnorm_sq > 1e-24 {
            let scale = c64::new(2.0 / vnorm_sq, 0.0);
            for i in 0..dim {
                for j in 0..dim {
                    mat[[i, j]] -= scale * v[i] * v[j].conj();
                }
            }
        }
        // Column 0 is now conj(phase)·ψ; rotate the whole operator by phase.
        let mat = mat.mapv(|x| x * phase);
        Ok(UnitaryMatrix { mat, qubits })
    }

    pub fn unitarity_defect(&self) -> f64 {
        unitarity_defect(&self.mat)
    }
}

/// Frobenius norm of `U†U − I`.
pub(crate) fn unitarity_defect(mat: &Array2<c64>) -> f64 {
    let gram = adjoint(mat).dot(mat);
    let dim = mat.nrows();
    let mut acc = 0.0f64;
    for i in 0..dim {
        for j in 0..dim {
            let want = if i == j { c64::new(1.0, 0.0) } else { c64::new(0.0, 0.0) };
            acc += (gram[[i, j]] - want).norm_sqr();
        }
    }
    acc.sqrt()
}

/// Global-phase-invariant operator-norm distance
/// `min_θ ‖U − e^{iθ}V‖_op`.
///
/// For unitaries, `‖U − e^{iθ}V‖_op = max_j |μ_j − e^{iθ}|` where μ_j are the
/// (unit-modulus) eigenvalues of `UV†`. The minimax over θ is attained either
/// at one of the eigenvalue angles or where two constraint circles cross — at
/// a pairwise angular midpoint or its antipode — so scanning that finite
/// candidate set is exact up to eigensolver precision.
pub fn operator_norm_distance(u: &UnitaryMatrix, v: &UnitaryMatrix) -> Result<f64> {
    if u.dim() != v.dim() {
        return Err(Error::DimensionMismatch { expected: u.dim(), got: v.dim() });
    }
    let w = u.matrix().dot(&adjoint(v.matrix()));
    let (vals, _) = w.eig()?;
    let angles: Vec<f64> = vals.iter().map(|z| z.arg()).collect();

    let mut candidates: Vec<f64> = angles.clone();
    for i in 0..angles.len() {
        for j in (i + 1)..angles.len() {
            let mid = (angles[i] + angles[j]) / 2.0;
            candidates.push(mid);
            candidates.push(mid + std::f64::consts::PI);
        }
    }

    let mut best = f64::INFINITY;
    for theta in candidates {
        let e = c64::new(theta.cos(), theta.sin());
        let worst = vals
            .iter()
            .map(|z| (z - e).norm())
            .fold(0.0f64, f64::max);
        best = best.min(worst);
    }
    Ok(best)
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    fn c(re: f64, im: f64) -> c64 {
        c64::new(re, im)
    }

    fn pauli_z() -> UnitaryMatrix {
        UnitaryMatrix::new(array![[c(1.0, 0.0), c(0.0, 0.0)], [c(0.0, 0.0), c(-1.0, 0.0)]])
            .unwrap()
    }

    fn hadamard() -> UnitaryMatrix {
        let s = 1.0 / 2.0f64.sqrt();
        UnitaryMatrix::new(array![[c(s, 0.0), c(s, 0.0)], [c(s, 0.0), c(-s, 0.0)]]).unwrap()
    }

    #[test]
    fn rejects_non_unitary() {
        let m = array![[c(1.0, 0.0), c(0.0, 0.0)], [c(0.0, 0.0), c(0.5, 0.0)]];
        assert!(matches!(UnitaryMatrix::new(m), Err(Error::NotUnitary(_))));
    }

    #[test]
    fn conjugation_preserves_density_invariants() {
        let h = hadamard();
        let rho = PureState::zero(1).unwrap().to_density();
        let out = h.conjugate(&rho).unwrap();
        assert!((out.trace() - c(1.0, 0.0)).norm() < 1e-12);
        assert!((out.purity() - 1.0).abs() < 1e-12);
        // H|0⟩⟨0|H = |+⟩⟨+|, all entries 1/2.
        for v in out.matrix().iter() {
            assert!((v - c(0.5, 0.0)).norm() < 1e-12);
        }
    }

    #[test]
    fn identity_vs_pauli_z_distance_is_sqrt_two() {
        // Eigenvalues of I·Z† are {1, −1}; the best phase sits halfway,
        // giving distance |1 − i| = √2.
        let d = operator_norm_distance(&UnitaryMatrix::identity(1).unwrap(), &pauli_z()).unwrap();
        assert!((d - 2.0f64.sqrt()).abs() < 1e-9, "got {d}");
    }

    #[test]
    fn phase_rotation_has_zero_distance() {
        let h = hadamard();
        let phased =
            UnitaryMatrix::new(h.matrix().mapv(|x| x * c64::new(0.0, 1.0))).unwrap();
        let d = operator_norm_distance(&h, &phased).unwrap();
        assert!(d < 1e-9, "got {d}");
    }

    #[test]
    fn distance_is_symmetric_and_triangleish() {
        let h = hadamard();
        let z = pauli_z();
        let i = UnitaryMatrix::identity(1).unwrap();
        let dhz = operator_norm_distance(&h, &z).unwrap();
        let dzh = operator_norm_distance(&z, &h).unwrap();
        assert!((dhz - dzh).abs() < 1e-9);
        let dhi = operator_norm_distance(&h, &i).unwrap();
        let diz = operator_norm_distance(&i, &z).unwrap();
        assert!(dhz <= dhi + diz + 1e-9);
    }

    #[test]
    fn preparing_maps_zero_to_target() {
        let cases = [
            array![c(0.6, 0.0), c(0.0, 0.8)],
            array![c(0.0, 0.0), c(1.0, 0.0)], // ⟨0|ψ⟩ = 0 branch
            array![c(0.5, 0.5), c(0.5, -0.5)],
        ];
        for amps in cases {
            let psi = PureState::new(amps).unwrap();
            let u = UnitaryMatrix::preparing(&psi).unwrap();
            assert!(u.unitarity_defect() < 1e-10);
            let out = u.apply(&PureState::zero(1).unwrap()).unwrap();
            // Exact column equality, not just overlap: global phase matters
            // downstream.
            for (a, b) in out.amplitudes().iter().zip(psi.amplitudes().iter()) {
                assert!((a - b).norm() < 1e-10);
            }
        }
    }

    #[test]
    fn compose_applies_right_factor_first() {
        let h = hadamard();
        let z = pauli_z();
        let zh = z.compose(&h).unwrap();
        let psi = PureState::zero(1).unwrap();
        let step = z.apply(&h.apply(&psi).unwrap()).unwrap();
        let fused = zh.apply(&psi).unwrap();
        for (a, b) in step.amplitudes().iter().zip(fused.amplitudes().iter()) {
            assert!((a - b).norm() < 1e-12);
        }
    }
}
