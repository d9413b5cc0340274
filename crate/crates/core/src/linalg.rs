//! Dense least-squares helpers.
//!
//! Minimum-norm least squares goes through a Householder QR of the tall
//! matrix followed by an SVD of the square triangular factor. Both share the
//! singular values of the original matrix, so the relative cutoff behaves
//! exactly like a cutoff applied to a full SVD, at roughly half the cost.

use nalgebra::{DMatrix, DVector, SVD};

use crate::error::{Error, Result};

/// Default relative singular-value cutoff for pseudo-solves.
pub const DEFAULT_RCOND: f64 = 1e-10;

const SVD_EPS: f64 = f64::EPSILON;

fn svd_of(m: DMatrix<f64>) -> Result<SVD<f64, nalgebra::Dyn, nalgebra::Dyn>> {
    let iters = 100 * m.nrows().max(m.ncols()).max(1);
    SVD::try_new(m, true, true, SVD_EPS, iters).ok_or(Error::SvdNoConvergence)
}

fn cutoff(sv: &DVector<f64>, rcond: f64) -> f64 {
    sv.max() * rcond
}

/// Apply `V Σ⁺ Uᵀ` to `rhs`, zeroing singular values at or below `cut`.
fn svd_apply(svd: &SVD<f64, nalgebra::Dyn, nalgebra::Dyn>, rhs: &DVector<f64>, cut: f64) -> DVector<f64> {
    let u = svd.u.as_ref().expect("u requested");
    let v_t = svd.v_t.as_ref().expect("v_t requested");
    let mut coeffs = u.tr_mul(rhs);
    for (c, &s) in coeffs.iter_mut().zip(svd.singular_values.iter()) {
        *c = if s > cut && s > 0.0 { *c / s } else { 0.0 };
    }
    v_t.tr_mul(&coeffs)
}

/// Minimum-norm least-squares solution of `a · x ≈ b`.
///
/// Singular values below `rcond · σ_max` are treated as zero.
pub fn pseudo_solve(a: &DMatrix<f64>, b: &DVector<f64>, rcond: f64) -> Result<DVector<f64>> {
    if a.nrows() != b.len() {
        return Err(Error::DimensionMismatch {
            what: "pseudo_solve right-hand side",
            expected: a.nrows(),
            got: b.len(),
        });
    }
    if a.nrows() == 0 || a.ncols() == 0 {
        return Err(Error::InvalidParameter("pseudo_solve needs a nonempty matrix"));
    }
    if !(rcond >= 0.0) {
        return Err(Error::InvalidParameter("rcond must be nonnegative"));
    }
    let v = a.ncols();
    if a.nrows() >= v {
        let qr = a.clone().qr();
        let mut qtb = b.clone();
        qr.q_tr_mul(&mut qtb);
        let qtb = qtb.rows(0, v).into_owned();
        let svd = svd_of(qr.r())?;
        let cut = cutoff(&svd.singular_values, rcond);
        Ok(svd_apply(&svd, &qtb, cut))
    } else {
        let svd = svd_of(a.clone())?;
        let cut = cutoff(&svd.singular_values, rcond);
        Ok(svd_apply(&svd, b, cut))
    }
}

/// An explicit Moore-Penrose inverse, computed once and applied many times.
#[derive(Debug, Clone, PartialEq)]
pub struct PseudoInverse {
    matrix: DMatrix<f64>,
    rank: usize,
}

impl PseudoInverse {
    pub fn new(a: &DMatrix<f64>, rcond: f64) -> Result<Self> {
        if a.nrows() == 0 || a.ncols() == 0 {
            return Err(Error::InvalidParameter("pseudo-inverse of an empty matrix"));
        }
        let svd = svd_of(a.clone())?;
        let cut = cutoff(&svd.singular_values, rcond);
        let rank = svd.singular_values.iter().filter(|&&s| s > cut && s > 0.0).count();
        let u = svd.u.as_ref().expect("u requested");
        let v_t = svd.v_t.as_ref().expect("v_t requested");
        let mut scaled_ut = u.transpose();
        for (mut row, &s) in scaled_ut.row_iter_mut().zip(svd.singular_values.iter()) {
            let inv = if s > cut && s > 0.0 { 1.0 / s } else { 0.0 };
            row *= inv;
        }
        Ok(Self {
            matrix: v_t.tr_mul(&scaled_ut),
            rank,
        })
    }

    pub fn apply(&self, b: &DVector<f64>) -> Result<DVector<f64>> {
        if b.len() != self.matrix.ncols() {
            return Err(Error::DimensionMismatch {
                what: "pseudo-inverse operand",
                expected: self.matrix.ncols(),
                got: b.len(),
            });
        }
        Ok(&self.matrix * b)
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    /// Numerical rank retained after the cutoff.
    pub fn rank(&self) -> usize {
        self.rank
    }
}

/// Solve `l · x = b` for lower-triangular `l` by forward substitution.
pub fn solve_lower_triangular(l: &DMatrix<f64>, b: &DVector<f64>) -> Result<DVector<f64>> {
    let n = l.nrows();
    if l.ncols() != n || b.len() != n {
        return Err(Error::DimensionMismatch {
            what: "triangular solve",
            expected: n,
            got: b.len(),
        });
    }
    let mut x = DVector::zeros(n);
    for i in 0..n {
        let d = l[(i, i)];
        if d == 0.0 {
            return Err(Error::SingularLiftedMatrix);
        }
        let mut acc = b[i];
        for j in 0..i {
            acc -= l[(i, j)] * x[j];
        }
        x[i] = acc / d;
    }
    Ok(x)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};

    #[test]
    fn identity_returns_rhs() {
        let a = DMatrix::<f64>::identity(4, 4);
        let b = DVector::from_vec(alloc::vec![1.0, -2.0, 3.5, 0.25]);
        let x = pseudo_solve(&a, &b, DEFAULT_RCOND).unwrap();
        assert!((x - b).amax() < 1e-14);
    }

    #[test]
    fn single_column_gives_mean() {
        let a = DMatrix::from_column_slice(2, 1, &[1.0, 1.0]);
        let b = DVector::from_vec(alloc::vec![1.0, 3.0]);
        let x = pseudo_solve(&a, &b, DEFAULT_RCOND).unwrap();
        assert!((x[0] - 2.0).abs() < 1e-14);
    }

    #[test]
    fn residual_is_orthogonal_to_column_space() {
        let mut rng = rand::rngs::StdRng::seed_from_u64(7);
        let a = DMatrix::from_fn(50, 20, |_, _| rng.random_range(-1.0..1.0));
        let b = DVector::from_fn(50, |_, _| rng.random_range(-1.0..1.0));
        let x = pseudo_solve(&a, &b, DEFAULT_RCOND).unwrap();
        let grad = a.tr_mul(&(&a * &x - &b));
        assert!(grad.norm() < 1e-9 * b.norm());
    }

    #[test]
    fn rank_deficient_gives_minimum_norm() {
        // Duplicate columns: the minimum-norm solution splits weight evenly.
        let a = DMatrix::from_row_slice(3, 2, &[1.0, 1.0, 1.0, 1.0, 1.0, 1.0]);
        let b = DVector::from_vec(alloc::vec![2.0, 2.0, 2.0]);
        let x = pseudo_solve(&a, &b, DEFAULT_RCOND).unwrap();
        assert!((x[0] - 1.0).abs() < 1e-12 && (x[1] - 1.0).abs() < 1e-12);
        let op = PseudoInverse::new(&a, DEFAULT_RCOND).unwrap();
        assert_eq!(op.rank(), 1);
        assert!((op.apply(&b).unwrap() - x).amax() < 1e-12);
    }

    #[test]
    fn wide_matrix_is_supported() {
        let a = DMatrix::from_row_slice(1, 2, &[3.0, 4.0]);
        let b = DVector::from_vec(alloc::vec![5.0]);
        let x = pseudo_solve(&a, &b, DEFAULT_RCOND).unwrap();
        assert!((x[0] - 0.6).abs() < 1e-12 && (x[1] - 0.8).abs() < 1e-12);
    }

    #[test]
    fn dimension_mismatch_is_reported() {
        let a = DMatrix::<f64>::identity(3, 3);
        let b = DVector::zeros(2);
        assert!(matches!(
            pseudo_solve(&a, &b, DEFAULT_RCOND),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn forward_substitution() {
        let l = DMatrix::from_row_slice(2, 2, &[2.0, 0.0, 1.0, 4.0]);
        let b = DVector::from_vec(alloc::vec![2.0, 9.0]);
        let x = solve_lower_triangular(&l, &b).unwrap();
        assert_eq!(x.as_slice(), &[1.0, 2.0]);
        let singular = DMatrix::from_row_slice(2, 2, &[0.0, 0.0, 1.0, 4.0]);
        assert_eq!(solve_lower_triangular(&singular, &b), Err(Error::SingularLiftedMatrix));
    }
}
