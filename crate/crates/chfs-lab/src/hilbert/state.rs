//! Pure states and density matrices.

use ndarray::{Array1, Array2};
use ndarray_linalg::c64;

use super::{adjoint, ensure_qubits, kron_mat, qubits_for_dim, TOL_STRUCTURAL};
use crate::error::{Error, Result};

/// A unit-norm complex amplitude vector over `qubits` qubits.
///
/// Normalization is a construction invariant: `Σ|a_i|² = 1` within
/// [`TOL_STRUCTURAL`]. A zero-qubit state is the one-dimensional scalar.
#[derive(Clone, Debug)]
pub struct PureState {
    amps: Array1<c64>,
    qubits: usize,
}

impl PureState {
    /// Wrap an amplitude vector, validating dimension and normalization.
    pub fn new(amps: Array1<c64>) -> Result<Self> {
        let qubits = qubits_for_dim(amps.len())?;
        ensure_qubits(qubits)?;
        let norm_sq: f64 = amps.iter().map(|a| a.norm_sqr()).sum();
        if (norm_sq - 1.0).abs() > TOL_STRUCTURAL {
            return Err(Error::NotNormalized((norm_sq - 1.0).abs()));
        }
        Ok(PureState { amps, qubits })
    }

    /// Normalize an arbitrary nonzero vector into a state.
    pub fn from_unnormalized(amps: Array1<c64>) -> Result<Self> {
        let qubits = qubits_for_dim(amps.len())?;
        ensure_qubits(qubits)?;
        let norm: f64 = amps.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
        if norm < 1e-12 {
            return Err(Error::NotNormalized(1.0));
        }
        Ok(PureState { amps: amps.mapv(|a| a / norm), qubits })
    }

    /// Computational basis state `|index⟩` on `qubits` qubits.
    pub fn computational(qubits: usize, index: usize) -> Result<Self> {
        ensure_qubits(qubits)?;
        let dim = 1usize << qubits;
        if index >= dim {
            return Err(Error::InvalidArgument(format!(
                "basis index {index} out of range for {qubits} qubits"
            )));
        }
        let mut amps = Array1::zeros(dim);
        amps[index] = c64::new(1.0, 0.0);
        Ok(PureState { amps, qubits })
    }

    /// `|0…0⟩` on `qubits` qubits.
    pub fn zero(qubits: usize) -> Result<Self> {
        Self::computational(qubits, 0)
    }

    pub fn qubits(&self) -> usize {
        self.qubits
    }

    pub fn dim(&self) -> usize {
        self.amps.len()
    }

    pub fn amplitudes(&self) -> &Array1<c64> {
        &self.amps
    }

    pub fn amp(&self, i: usize) -> c64 {
        self.amps[i]
    }

    /// Inner product `⟨self|other⟩`.
    pub fn inner(&self, other: &PureState) -> Result<c64> {
        if self.dim() != other.dim() {
            return Err(Error::DimensionMismatch { expected: self.dim(), got: other.dim() });
        }
        Ok(self
            .amps
            .iter()
            .zip(other.amps.iter())
            .map(|(a, b)| a.conj() * b)
            .sum())
    }

    /// Squared overlap `|⟨self|other⟩|²`.
    pub fn overlap_sq(&self, other: &PureState) -> Result<f64> {
        Ok(self.inner(other)?.norm_sqr())
    }

    /// Projector `|ψ⟩⟨ψ|` as a density matrix.
    pub fn to_density(&self) -> DensityMatrix {
        let dim = self.dim();
        let mut mat = Array2::zeros((dim, dim));
        for (i, &a) in self.amps.iter().enumerate() {
            if a == c64::new(0.0, 0.0) {
                continue;
            }
            for (j, &b) in self.amps.iter().enumerate() {
                mat[[i, j]] = a * b.conj();
            }
        }
        DensityMatrix { mat, qubits: self.qubits }
    }

    /// Tensor product, `self` on the leading qubits.
    pub fn tensor(&self, other: &PureState) -> Result<PureState> {
        ensure_qubits(self.qubits + other.qubits)?;
        let mut amps = Array1::zeros(self.dim() * other.dim());
        for (i, &a) in self.amps.iter().enumerate() {
            for (j, &b) in other.amps.iter().enumerate() {
                amps[i * other.dim() + j] = a * b;
            }
        }
        Ok(PureState { amps, qubits: self.qubits + other.qubits })
    }

    pub(crate) fn from_parts_unchecked(amps: Array1<c64>, qubits: usize) -> Self {
        PureState { amps, qubits }
    }
}

/// A Hermitian, positive-semidefinite, unit-trace complex matrix.
///
/// Construction validates Hermiticity and trace at [`TOL_STRUCTURAL`];
/// positive semidefiniteness is a spectral property checked by
/// [`DensityMatrix::validate_full`] (and exercised by the test suite), since
/// an eigendecomposition on every construction would dominate runtime.
#[derive(Clone, Debug)]
pub struct DensityMatrix {
    mat: Array2<c64>,
    qubits: usize,
}

impl DensityMatrix {
    /// Wrap a matrix, validating shape, Hermiticity, and trace.
    pub fn new(mat: Array2<c64>) -> Result<Self> {
        if mat.nrows() != mat.ncols() {
            return Err(Error::DimensionMismatch { expected: mat.nrows(), got: mat.ncols() });
        }
        let qubits = qubits_for_dim(mat.nrows())?;
        ensure_qubits(qubits)?;
        let mut herm_defect: f64 = 0.0;
        for i in 0..mat.nrows() {
            for j in i..mat.ncols() {
                herm_defect = herm_defect.max((mat[[i, j]] - mat[[j, i]].conj()).norm());
            }
        }
        if herm_defect > TOL_STRUCTURAL {
            return Err(Error::NotHermitian(herm_defect));
        }
        let trace: c64 = (0..mat.nrows()).map(|i| mat[[i, i]]).sum();
        let trace_defect = (trace - c64::new(1.0, 0.0)).norm();
        if trace_defect > TOL_STRUCTURAL {
            return Err(Error::BadTrace(trace_defect));
        }
        Ok(DensityMatrix { mat, qubits })
    }

    /// Internal fast path for matrices that are valid by construction
    /// (mixtures, unitary conjugations, partial traces of valid states).
    pub(crate) fn new_unchecked(mat: Array2<c64>) -> Self {
        let qubits = qubits_for_dim(mat.nrows()).expect("power-of-two dimension");
        DensityMatrix { mat, qubits }
    }

    /// `|ψ⟩⟨ψ|`.
    pub fn from_pure(psi: &PureState) -> Self {
        psi.to_density()
    }

    /// `I / 2^n`.
    pub fn maximally_mixed(qubits: usize) -> Result<Self> {
        ensure_qubits(qubits)?;
        let dim = 1usize << qubits;
        let mat = Array2::eye(dim).mapv(|v: f64| c64::new(v / dim as f64, 0.0));
        Ok(DensityMatrix { mat, qubits })
    }

    /// Convex mixture `Σ p_i ρ_i`. Weights must be nonnegative and sum to 1
    /// within [`TOL_STRUCTURAL`]; all parts must share a dimension.
    pub fn mixture(parts: &[(f64, DensityMatrix)]) -> Result<Self> {
        let (_, first) = parts
            .first()
            .ok_or_else(|| Error::InvalidArgument("empty mixture".into()))?;
        let dim = first.dim();
        let total: f64 = parts.iter().map(|(p, _)| p).sum();
        if parts.iter().any(|(p, _)| *p < -TOL_STRUCTURAL) || (total - 1.0).abs() > TOL_STRUCTURAL
        {
            return Err(Error::InvalidArgument(format!(
                "mixture weights must be a distribution (sum {total})"
            )));
        }
        let mut mat = Array2::zeros((dim, dim));
        for (p, rho) in parts {
            if rho.dim() != dim {
                return Err(Error::DimensionMismatch { expected: dim, got: rho.dim() });
            }
            mat = mat + rho.matrix().mapv(|v| v * c64::new(*p, 0.0));
        }
        Ok(DensityMatrix { mat, qubits: first.qubits })
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

    pub fn trace(&self) -> c64 {
        (0..self.dim()).map(|i| self.mat[[i, i]]).sum()
    }

    /// Purity `Tr(ρ²)`. For Hermitian ρ this is `Σ_{ij} |ρ_{ij}|²`, which
    /// avoids a matrix product.
    pub fn purity(&self) -> f64 {
        self.mat.iter().map(|v| v.norm_sqr()).sum()
    }

    /// Real Hilbert–Schmidt overlap `Tr(ρσ)`; real and nonnegative for a pair
    /// of density matrices.
    pub fn overlap(&self, other: &DensityMatrix) -> Result<f64> {
        if self.dim() != other.dim() {
            return Err(Error::DimensionMismatch { expected: self.dim(), got: other.dim() });
        }
        // Tr(ρσ) = Σ_{ij} ρ_{ij} σ_{ji} = Σ_{ij} ρ_{ij} conj(σ_{ij}) for Hermitian σ.
        let s: c64 = self
            .mat
            .iter()
            .zip(other.mat.iter())
            .map(|(a, b)| a * b.conj())
            .sum();
        Ok(s.re)
    }

    /// Expectation `⟨ψ|ρ|ψ⟩` (real part; exact for Hermitian ρ).
    pub fn expectation(&self, psi: &PureState) -> Result<f64> {
        if self.dim() != psi.dim() {
            return Err(Error::DimensionMismatch { expected: self.dim(), got: psi.dim() });
        }
        let v = psi.amplitudes();
        let mut acc = c64::new(0.0, 0.0);
        for i in 0..self.dim() {
            for j in 0..self.dim() {
                acc += v[i].conj() * self.mat[[i, j]] * v[j];
            }
        }
        Ok(acc.re)
    }

    /// Tensor product, `self` on the leading qubits.
    pub fn tensor(&self, other: &DensityMatrix) -> Result<DensityMatrix> {
        ensure_qubits(self.qubits + other.qubits)?;
        Ok(DensityMatrix {
            mat: kron_mat(&self.mat, &other.mat),
            qubits: self.qubits + other.qubits,
        })
    }

    /// Full spectral validation: Hermitian, unit trace, and eigenvalues
    /// ≥ −tol. Used by tests and at trust boundaries.
    pub fn validate_full(&self, tol: f64) -> Result<()> {
        use ndarray_linalg::{Eigh, UPLO};
        let defect = {
            let adj = adjoint(&self.mat);
            self.mat
                .iter()
                .zip(adj.iter())
                .map(|(a, b)| (a - b).norm())
                .fold(0.0f64, f64::max)
        };
        if defect > tol {
            return Err(Error::NotHermitian(defect));
        }
        let trace_defect = (self.trace() - c64::new(1.0, 0.0)).norm();
        if trace_defect > tol {
            return Err(Error::BadTrace(trace_defect));
        }
        let (vals, _) = self.mat.eigh(UPLO::Lower)?;
        let min = vals.iter().cloned().fold(f64::INFINITY, f64::min);
        if min < -tol {
            return Err(Error::NotPositive(min));
        }
        Ok(())
    }
}
