//! Small dense symmetric solves shared by the initial-sample and LM systems.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::error::{Error, Result};

/// Above this (equilibrated) condition estimate the solve switches to a
/// truncated least-norm solution.
pub const LEAST_NORM_CONDITION: f64 = 1e12;

/// Above this the system is reported as singular.
pub const SINGULAR_CONDITION: f64 = 1e15;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolveInfo {
    /// Condition estimate of the diagonally equilibrated matrix.
    pub condition: f64,
    pub least_norm: bool,
}

/// Solves `A·x = b` for symmetric positive semi-definite `A`.
///
/// The matrix is equilibrated to unit diagonal first so the condition
/// estimate is independent of parameter units. With `allow_inactive`, rows
/// whose diagonal is exactly zero (all-zero Jacobian columns) get `x_i = 0`
/// and are dropped from the solve; otherwise they make the system singular.
pub fn solve_spd(a: &DMatrix<f64>, b: &DVector<f64>, allow_inactive: bool) -> Result<(DVector<f64>, SolveInfo)> {
    let n = a.nrows();
    debug_assert_eq!(n, a.ncols());
    debug_assert_eq!(n, b.len());
    let singular = |condition| Err(Error::SingularSystem { condition });

    let mut active = Vec::with_capacity(n);
    for i in 0..n {
        let d = a[(i, i)];
        if !d.is_finite() || d < 0.0 {
            return singular(f64::INFINITY);
        }
        if d > 0.0 {
            active.push(i);
        } else if !allow_inactive {
            return singular(f64::INFINITY);
        }
    }
    let m = active.len();
    let mut x = DVector::zeros(n);
    if m == 0 {
        return Ok((x, SolveInfo { condition: 1.0, least_norm: false }));
    }

    let scale: Vec<f64> = active.iter().map(|&i| 1.0 / a[(i, i)].sqrt()).collect();
    let scaled = DMatrix::from_fn(m, m, |r, c| a[(active[r], active[c])] * scale[r] * scale[c]);
    let rhs = DVector::from_fn(m, |r, _| b[active[r]] * scale[r]);

    let eig = SymmetricEigen::new(scaled.clone());
    let lmax = eig.eigenvalues.max();
    let lmin = eig.eigenvalues.min();
    if !(lmax > 0.0) || !lmin.is_finite() {
        return singular(f64::INFINITY);
    }
    let condition = if lmin > 0.0 { lmax / lmin } else { f64::INFINITY };
    if condition > SINGULAR_CONDITION {
        return singular(condition);
    }

    let (z, least_norm) = if condition <= LEAST_NORM_CONDITION {
        match scaled.cholesky() {
            Some(ch) => (ch.solve(&rhs), false),
            None => return singular(condition),
        }
    } else {
        let cutoff = lmax / LEAST_NORM_CONDITION;
        let mut z = DVector::zeros(m);
        for (k, &lambda) in eig.eigenvalues.iter().enumerate() {
            if lambda > cutoff {
                let v = eig.eigenvectors.column(k);
                z += v * (v.dot(&rhs) / lambda);
            }
        }
        (z, true)
    };

    for (r, &i) in active.iter().enumerate() {
        x[i] = z[r] * scale[r];
    }
    if x.iter().any(|v| !v.is_finite()) {
        return singular(condition);
    }
    Ok((x, SolveInfo { condition, least_norm }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn solves_well_conditioned_system() {
        let a = DMatrix::from_row_slice(2, 2, &[4.0, 1.0, 1.0, 3.0]);
        let b = DVector::from_vec(vec![1.0, 2.0]);
        let (x, info) = solve_spd(&a, &b, false).unwrap();
        assert!(!info.least_norm);
        assert_relative_eq!(x[0], 1.0 / 11.0, epsilon = 1e-14);
        assert_relative_eq!(x[1], 7.0 / 11.0, epsilon = 1e-14);
    }

    #[test]
    fn unit_scaling_does_not_change_condition() {
        let a = DMatrix::from_row_slice(2, 2, &[4.0e10, 1.0e5, 1.0e5, 3.0]);
        let (_, info) = solve_spd(&a, &DVector::from_vec(vec![1.0, 1.0]), false).unwrap();
        assert!(info.condition < 10.0);
    }

    #[test]
    fn duplicate_columns_are_singular() {
        let a = DMatrix::from_row_slice(2, 2, &[2.0, 2.0, 2.0, 2.0]);
        let err = solve_spd(&a, &DVector::from_vec(vec![1.0, 1.0]), false).unwrap_err();
        assert!(matches!(err, Error::SingularSystem { .. }));
    }

    #[test]
    fn inactive_rows() {
        let a = DMatrix::from_row_slice(2, 2, &[0.0, 0.0, 0.0, 2.0]);
        let b = DVector::from_vec(vec![0.0, 4.0]);
        assert!(solve_spd(&a, &b, false).is_err());
        let (x, _) = solve_spd(&a, &b, true).unwrap();
        assert_eq!(x[0], 0.0);
        assert_relative_eq!(x[1], 2.0, epsilon = 1e-14);
    }

    #[test]
    fn ill_conditioned_falls_back_to_least_norm() {
        let eps = 1e-13;
        let a = DMatrix::from_row_slice(2, 2, &[1.0, 1.0 - eps, 1.0 - eps, 1.0]);
        let b = DVector::from_vec(vec![2.0, 2.0]);
        let (x, info) = solve_spd(&a, &b, false).unwrap();
        assert!(info.least_norm);
        assert_relative_eq!(x[0], x[1], epsilon = 1e-6);
    }
}
