//! Haar-random states and unitaries.

use ndarray::{Array1, Array2};
use ndarray_linalg::{c64, QRSquare};

use super::state::PureState;
use super::unitary::UnitaryMatrix;
use super::ensure_qubits;
use crate::error::{Error, Result};
use crate::rng::LabRng;

/// A Haar-random pure state on `qubits` qubits: a normalized complex
/// Gaussian (Ginibre) vector. For zero qubits this is a uniformly random
/// phase on the one-dimensional space.
pub fn haar_state(qubits: usize, rng: &mut LabRng) -> Result<PureState> {
    ensure_qubits(qubits)?;
    let dim = 1usize << qubits;
    let mut amps = Array1::<c64>::zeros(dim);
    loop {
        for a in amps.iter_mut() {
            *a = rng.ginibre();
        }
        let norm: f64 = amps.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
        // A Gaussian vector is zero with probability 0; the retry guards
        // against pathological underflow without biasing the distribution.
        if norm > 1e-12 {
            return PureState::new(amps.mapv(|a| a / norm));
        }
    }
}

/// A Haar-random unitary on `qubits` qubits via QR of a Ginibre matrix with
/// the R-diagonal phase correction (plain QR output is not Haar; rescaling
/// column j of Q by `r_jj / |r_jj|` restores invariance).
pub fn haar_unitary(qubits: usize, rng: &mut LabRng) -> Result<UnitaryMatrix> {
    ensure_qubits(qubits)?;
    let dim = 1usize << qubits;
    let mut g = Array2::<c64>::zeros((dim, dim));
    for v in g.iter_mut() {
        *v = rng.ginibre();
    }
    let (q, r) = g
        .qr_square()
        .map_err(|e| Error::Backend(format!("QR factorization failed: {e}")))?;
    let mut u = q;
    for j in 0..dim {
        let d = r[[j, j]];
        if d.norm() < 1e-300 {
            // Probability-zero event for Ginibre input; fail loudly rather
            // than emit a non-Haar sample.
            return Err(Error::Backend("degenerate R diagonal in QR".into()));
        }
        let phase = d / c64::new(d.norm(), 0.0);
        for i in 0..dim {
            u[[i, j]] *= phase;
        }
    }
    UnitaryMatrix::new(u)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stats::{ks_critical_value, ks_statistic, mean_and_se};

    #[test]
    fn zero_qubit_state_is_a_pure_phase() {
        let mut rng = LabRng::from_seed_u64(7);
        let s = haar_state(0, &mut rng).unwrap();
        assert_eq!(s.dim(), 1);
        assert!((s.amp(0).norm() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn same_seed_same_state() {
        let mut a = LabRng::from_seed_u64(42);
        let mut b = LabRng::from_seed_u64(42);
        let sa = haar_state(3, &mut a).unwrap();
        let sb = haar_state(3, &mut b).unwrap();
        for (x, y) in sa.amplitudes().iter().zip(sb.amplitudes().iter()) {
            assert_eq!(x, y);
        }
    }

    #[test]
    fn single_qubit_zero_overlap_has_mean_half() {
        // |⟨0|ψ⟩|² over Haar ψ on one qubit is uniform on [0,1]: mean 1/2.
        let mut rng = LabRng::from_seed_u64(2024);
        let samples: Vec<f64> = (0..100_000)
            .map(|_| {
                let s = haar_state(1, &mut rng).unwrap();
                s.amp(0).norm_sqr()
            })
            .collect();
        let (mean, se) = mean_and_se(&samples);
        assert!(
            (mean - 0.5).abs() < 3.0 * se,
            "mean {mean} departs from 1/2 by more than 3 standard errors ({se})"
        );
    }

    #[test]
    fn three_qubit_overlap_follows_beta_law() {
        // |⟨0|ψ⟩|² ~ Beta(1, N−1) with CDF 1 − (1−x)^{N−1}, N = 8.
        let mut rng = LabRng::from_seed_u64(5150);
        let n_samples = 4000;
        let samples: Vec<f64> = (0..n_samples)
            .map(|_| haar_state(3, &mut rng).unwrap().amp(0).norm_sqr())
            .collect();
        let cdf = |x: f64| 1.0 - (1.0 - x).powi(7);
        let d = ks_statistic(&samples, cdf);
        let crit = ks_critical_value(n_samples, 0.001);
        assert!(d < crit, "KS statistic {d} exceeds the 0.1% critical value {crit}");
    }

    #[test]
    fn haar_unitary_is_unitary_and_deterministic() {
        let mut a = LabRng::from_seed_u64(9);
        let u = haar_unitary(2, &mut a).unwrap();
        assert!(u.unitarity_defect() < 1e-10);
        let mut b = LabRng::from_seed_u64(9);
        let v = haar_unitary(2, &mut b).unwrap();
        for (x, y) in u.matrix().iter().zip(v.matrix().iter()) {
            assert_eq!(x, y);
        }
    }

    #[test]
    fn haar_unitary_first_column_entry_matches_haar_state_law() {
        // Column 0 of a Haar unitary is a Haar state, so |U_00|² has mean
        // 1/N. Checks the R-diagonal phase correction didn't skew moduli.
        let mut rng = LabRng::from_seed_u64(31);
        let n_samples = 4000;
        let samples: Vec<f64> = (0..n_samples)
            .map(|_| haar_unitary(2, &mut rng).unwrap().matrix()[[0, 0]].norm_sqr())
            .collect();
        let (mean, se) = mean_and_se(&samples);
        assert!(
            (mean - 0.25).abs() < 4.0 * se,
            "mean {mean} departs from 1/4 by more than 4 standard errors ({se})"
        );
    }
}
