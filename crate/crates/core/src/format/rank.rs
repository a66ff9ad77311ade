use nalgebra::DMatrix;

use crate::error::{KcpError, Result};
use crate::tensor::DenseTensor;

/// Relative singular-value cutoff used when none is given.
pub const DEFAULT_RANK_TOL: f64 = 1e-10;

/// Numerical rank of a matrix: the number of singular values above
/// `tol · σ_max`. Any exact KT decomposition of a weight whose matricization
/// is `w` needs at least this many branches.
pub fn kt_rank_lower_bound(w: &DenseTensor, tol: f64) -> Result<usize> {
    if w.order() != 2 {
        return Err(KcpError::RankMismatch {
            expected: 2,
            actual: w.order(),
        });
    }
    if w.data().iter().any(|v| !v.is_finite()) {
        return Err(KcpError::Svd("matrix has non-finite entries".into()));
    }
    let m = DMatrix::from_row_slice(w.rows(), w.cols(), w.data());
    let svd = m
        .try_svd(false, false, f64::EPSILON, 10_000)
        .ok_or_else(|| KcpError::Svd("iteration did not converge".into()))?;
    let sigma = svd.singular_values;
    let max = sigma.iter().fold(0.0f64, |a, &b| a.max(b));
    if max == 0.0 {
        return Ok(0);
    }
    Ok(sigma.iter().filter(|&&s| s > tol * max).count())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_and_identity() {
        let z = DenseTensor::zeros([3, 5]).unwrap();
        assert_eq!(kt_rank_lower_bound(&z, DEFAULT_RANK_TOL).unwrap(), 0);
        let id = DenseTensor::identity(4).unwrap();
        assert_eq!(kt_rank_lower_bound(&id, DEFAULT_RANK_TOL).unwrap(), 4);
    }

    #[test]
    fn rank_two_sum() {
        let t =
            DenseTensor::from_fn([4, 3], |ix| (ix[0] as f64) * (ix[1] as f64 + 1.0) + 1.0).unwrap();
        assert_eq!(kt_rank_lower_bound(&t, DEFAULT_RANK_TOL).unwrap(), 2);
    }

    #[test]
    fn rejects_non_matrix() {
        let t = DenseTensor::zeros([2, 2, 2]).unwrap();
        assert!(matches!(
            kt_rank_lower_bound(&t, DEFAULT_RANK_TOL),
            Err(KcpError::RankMismatch { .. })
        ));
    }
}
