//! Subsystem bookkeeping and the partial trace.

use ndarray::Array2;
use ndarray_linalg::c64;

use crate::error::{Error, Result};

use super::state::DensityMatrix;

/// An ordered factorization of a register into subsystems of given
/// dimensions. Factor 0 acts on the most significant digits of the index,
/// matching the leading-qubit tensor convention.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SubsystemSpec {
    dims: Vec<usize>,
}

impl SubsystemSpec {
    /// Build from explicit factor dimensions. Every factor must be ≥ 2 and
    /// the product must be a power of two (the register is made of qubits
    /// even when factors group several of them).
    pub fn new(dims: Vec<usize>) -> Result<Self> {
        if dims.is_empty() {
            return Err(Error::InvalidSubsystem("no factors".into()));
        }
        if let Some(&d) = dims.iter().find(|&&d| d < 2) {
            return Err(Error::InvalidSubsystem(format!("factor dimension {d} < 2")));
        }
        let mut product: usize = 1;
        for &d in &dims {
            product = product
                .checked_mul(d)
                .ok_or_else(|| Error::InvalidSubsystem("dimension overflow".into()))?;
        }
        if !product.is_power_of_two() {
            return Err(Error::InvalidSubsystem(format!(
                "total dimension {product} is not a power of two"
            )));
        }
        Ok(SubsystemSpec { dims })
    }

    /// A factor per qubit-group: `parts = [2, 1, 3]` gives factors of
    /// dimension 4, 2, 8.
    pub fn from_qubit_parts(parts: &[usize]) -> Result<Self> {
        if parts.contains(&0) {
            return Err(Error::InvalidSubsystem("zero-qubit part".into()));
        }
        Self::new(parts.iter().map(|&p| 1usize << p).collect())
    }

    /// One factor per qubit.
    pub fn qubits(n: usize) -> Result<Self> {
        Self::from_qubit_parts(&vec![1; n.max(1)])
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn factors(&self) -> usize {
        self.dims.len()
    }

    pub fn total_dim(&self) -> usize {
        self.dims.iter().product()
    }
}

/// Partial trace of `rho` over the factors *not* listed in `keep`.
///
/// `keep` must be strictly increasing and the kept factors retain their
/// relative order. The implementation decomposes each matrix index as
/// (kept-part, traced-part) and sums over the traced diagonal — O(D_K² · D_T)
/// with no intermediate tensors.
pub fn partial_trace(
    rho: &DensityMatrix,
    spec: &SubsystemSpec,
    keep: &[usize],
) -> Result<DensityMatrix> {
    if spec.total_dim() != rho.dim() {
        return Err(Error::DimensionMismatch { expected: rho.dim(), got: spec.total_dim() });
    }
    if keep.is_empty() {
        return Err(Error::InvalidSubsystem("must keep at least one factor".into()));
    }
    if keep.windows(2).any(|w| w[0] >= w[1]) || *keep.last().unwrap() >= spec.factors() {
        return Err(Error::InvalidSubsystem(format!(
            "keep list {keep:?} must be strictly increasing within 0..{}",
            spec.factors()
        )));
    }

    // Stride of each factor in the flat index (factor 0 most significant).
    let f = spec.factors();
    let mut strides = vec![1usize; f];
    for i in (0..f.saturating_sub(1)).rev() {
        strides[i] = strides[i + 1] * spec.dims()[i + 1];
    }

    let kept: Vec<usize> = keep.to_vec();
    let traced: Vec<usize> = (0..f).filter(|i| !kept.contains(i)).collect();

    // Enumerate flat offsets contributed by the kept factors (in kept order)
    // and by the traced factors.
    let enumerate_offsets = |factors: &[usize]| -> Vec<usize> {
        let mut offsets = vec![0usize];
        for &fi in factors {
            let mut next = Vec::with_capacity(offsets.len() * spec.dims()[fi]);
            for &base in &offsets {
                for v in 0..spec.dims()[fi] {
                    next.push(base + v * strides[fi]);
                }
            }
            offsets = next;
        }
        offsets
    };
    let keep_offsets = enumerate_offsets(&kept);
    let trace_offsets = enumerate_offsets(&traced);

    let dk = keep_offsets.len();
    let mut out = Array2::<c64>::zeros((dk, dk));
    let mat = rho.matrix();
    for (a, &oa) in keep_offsets.iter().enumerate() {
        for (b, &ob) in keep_offsets.iter().enumerate() {
            let mut acc = c64::new(0.0, 0.0);
            for &ot in &trace_offsets {
                acc += mat[[oa + ot, ob + ot]];
            }
            out[[a, b]] = acc;
        }
    }
    // Hermiticity and unit trace are inherited from rho exactly (the sum is
    // over identical diagonal offsets), so skip re-validation.
    Ok(DensityMatrix::new_unchecked(out))
}

/// Trace out the listed qubits of an n-qubit state (qubit 0 = most
/// significant), keeping the rest in order.
pub fn trace_out_qubits(rho: &DensityMatrix, drop: &[usize]) -> Result<DensityMatrix> {
    let n = rho.qubits();
    if n == 0 {
        return Err(Error::InvalidSubsystem("cannot trace a scalar register".into()));
    }
    if let Some(&q) = drop.iter().find(|&&q| q >= n) {
        return Err(Error::InvalidSubsystem(format!("qubit {q} out of range for {n} qubits")));
    }
    let spec = SubsystemSpec::qubits(n)?;
    let keep: Vec<usize> = (0..n).filter(|q| !drop.contains(q)).collect();
    partial_trace(rho, &spec, &keep)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hilbert::state::PureState;
    use ndarray::array;
    use ndarray_linalg::c64;

    fn c(re: f64, im: f64) -> c64 {
        c64::new(re, im)
    }

    #[test]
    fn spec_validation() {
        assert!(SubsystemSpec::new(vec![]).is_err());
        assert!(SubsystemSpec::new(vec![2, 1]).is_err());
        assert!(SubsystemSpec::new(vec![2, 3]).is_err());
        let s = SubsystemSpec::new(vec![4, 2, 8]).unwrap();
        assert_eq!(s.total_dim(), 64);
        assert_eq!(
            SubsystemSpec::from_qubit_parts(&[2, 1, 3]).unwrap(),
            s
        );
    }

    #[test]
    fn bell_marginals_are_maximally_mixed() {
        let bell = PureState::from_unnormalized(array![
            c(1.0, 0.0),
            c(0.0, 0.0),
            c(0.0, 0.0),
            c(1.0, 0.0)
        ])
        .unwrap()
        .to_density();
        for q in 0..2 {
            let reduced = trace_out_qubits(&bell, &[q]).unwrap();
            let mixed = DensityMatrix::maximally_mixed(1).unwrap();
            let defect: f64 = reduced
                .matrix()
                .iter()
                .zip(mixed.matrix().iter())
                .map(|(a, b)| (a - b).norm())
                .fold(0.0, f64::max);
            assert!(defect < 1e-12);
        }
    }

    #[test]
    fn product_state_marginals_recover_factors() {
        let a = PureState::from_unnormalized(array![c(1.0, 0.0), c(0.0, 2.0)]).unwrap();
        let b = PureState::from_unnormalized(array![c(3.0, 0.0), c(4.0, 0.0)]).unwrap();
        let joint = a.tensor(&b).unwrap().to_density();
        let spec = SubsystemSpec::qubits(2).unwrap();

        let left = partial_trace(&joint, &spec, &[0]).unwrap();
        let right = partial_trace(&joint, &spec, &[1]).unwrap();
        let da = a.to_density();
        let db = b.to_density();
        for (got, want) in [(&left, &da), (&right, &db)] {
            let defect: f64 = got
                .matrix()
                .iter()
                .zip(want.matrix().iter())
                .map(|(x, y)| (x - y).norm())
                .fold(0.0, f64::max);
            assert!(defect < 1e-12);
        }
    }

    #[test]
    fn keeping_everything_is_identity() {
        let a = PureState::from_unnormalized(array![c(1.0, 0.0), c(1.0, 1.0)]).unwrap();
        let rho = a.to_density();
        let spec = SubsystemSpec::qubits(1).unwrap();
        let same = partial_trace(&rho, &spec, &[0]).unwrap();
        let defect: f64 = same
            .matrix()
            .iter()
            .zip(rho.matrix().iter())
            .map(|(x, y)| (x - y).norm())
            .fold(0.0, f64::max);
        assert!(defect < 1e-12);
    }

    #[test]
    fn grouped_factors_trace_consistently() {
        // Trace the middle qubit of a 3-qubit register two ways: per-qubit
        // spec and grouped spec (4, 2) after reordering. Keep qubits {0, 2}.
        let v = PureState::from_unnormalized(array![
            c(1.0, 0.0),
            c(0.5, 0.0),
            c(0.0, 1.0),
            c(0.0, 0.0),
            c(0.25, 0.25),
            c(1.0, -1.0),
            c(0.0, 0.5),
            c(0.75, 0.0)
        ])
        .unwrap()
        .to_density();
        let per_qubit = trace_out_qubits(&v, &[1]).unwrap();
        assert_eq!(per_qubit.dim(), 4);
        assert!((per_qubit.trace() - c(1.0, 0.0)).norm() < 1e-12);
        // Purity of a marginal never exceeds 1.
        assert!(per_qubit.purity() <= 1.0 + 1e-12);
    }

    #[test]
    fn rejects_bad_keep_lists() {
        let rho = DensityMatrix::maximally_mixed(2).unwrap();
        let spec = SubsystemSpec::qubits(2).unwrap();
        assert!(partial_trace(&rho, &spec, &[]).is_err());
        assert!(partial_trace(&rho, &spec, &[1, 0]).is_err());
        assert!(partial_trace(&rho, &spec, &[2]).is_err());
    }
}
