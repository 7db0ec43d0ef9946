//! Normal-equation solves for the least-squares estimators.
//!
//! The Gram matrix is factored with a fully pivoted LU. A ridge jitter is
//! added only when the factorization looks singular; small designs such as
//! `N = 10, d_x = 4` sit close to rank deficiency.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Relative pivot size below which a Gram matrix is treated as singular.
const SINGULAR_PIVOT_RATIO: f64 = 1e-12;
/// Ridge jitter (relative to the largest diagonal entry, at least 1).
pub const RIDGE_JITTER: f64 = 1e-10;

/// A factored Gram matrix `XᵀX`.
#[derive(Debug, Clone)]
pub struct GramSolver {
    lu: nalgebra::linalg::FullPivLU<f64, nalgebra::Dyn, nalgebra::Dyn>,
    jittered: bool,
}

fn pivot_ratio(lu: &nalgebra::linalg::FullPivLU<f64, nalgebra::Dyn, nalgebra::Dyn>) -> f64 {
    let u = lu.u();
    let diag = u.diagonal();
    let max = diag.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let min = diag.iter().fold(f64::INFINITY, |m, v| m.min(v.abs()));
    if max == 0.0 || !max.is_finite() || !min.is_finite() {
        0.0
    } else {
        min / max
    }
}

impl GramSolver {
    pub fn new(gram: DMatrix<f64>) -> Result<Self> {
        if gram.iter().any(|v| !v.is_finite()) {
            return Err(Error::RankDeficient("non-finite entries in the Gram matrix".into()));
        }
        let scale = gram.diagonal().iter().fold(1.0f64, |m, v| m.max(v.abs()));
        let lu = gram.clone().full_piv_lu();
        if pivot_ratio(&lu) > SINGULAR_PIVOT_RATIO {
            return Ok(Self { lu, jittered: false });
        }
        let mut ridged = gram;
        for i in 0..ridged.nrows() {
            ridged[(i, i)] += RIDGE_JITTER * scale;
        }
        let lu = ridged.full_piv_lu();
        if pivot_ratio(&lu) == 0.0 {
            return Err(Error::RankDeficient("singular even after ridge jitter".into()));
        }
        Ok(Self { lu, jittered: true })
    }

    /// Whether the ridge fallback was needed.
    pub fn jittered(&self) -> bool {
        self.jittered
    }

    pub fn solve(&self, rhs: &DVector<f64>) -> Result<DVector<f64>> {
        let x = self
            .lu
            .solve(rhs)
            .ok_or_else(|| Error::RankDeficient("linear solve failed".into()))?;
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::RankDeficient("non-finite solution".into()));
        }
        Ok(x)
    }

    /// Single entry `[(XᵀX)⁻¹]_{jj}` via one solve against a unit vector.
    pub fn inverse_diagonal_entry(&self, j: usize) -> Result<f64> {
        let n = self.lu.u().nrows();
        let mut e = DVector::zeros(n);
        e[j] = 1.0;
        Ok(self.solve(&e)?[j])
    }

    pub fn inverse(&self) -> Result<DMatrix<f64>> {
        self.lu
            .try_inverse()
            .ok_or_else(|| Error::RankDeficient("inverse failed".into()))
    }
}

/// Row-major design matrix to `(XᵀX, Xᵀy)`.
pub fn normal_equations(design: &DMatrix<f64>, y: &DVector<f64>) -> (DMatrix<f64>, DVector<f64>) {
    (design.tr_mul(design), design.tr_mul(y))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn solves_well_conditioned() {
        let g = DMatrix::from_row_slice(2, 2, &[4.0, 1.0, 1.0, 3.0]);
        let s = GramSolver::new(g.clone()).unwrap();
        assert!(!s.jittered());
        let x = s.solve(&DVector::from_vec(vec![1.0, 2.0])).unwrap();
        let back = g * &x;
        assert!((back[0] - 1.0).abs() < 1e-14 && (back[1] - 2.0).abs() < 1e-14);
    }

    #[test]
    fn singular_gram_gets_jitter() {
        // Duplicate column: exactly singular.
        let g = DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 1.0, 1.0]);
        let s = GramSolver::new(g).unwrap();
        assert!(s.jittered());
        let x = s.solve(&DVector::from_vec(vec![2.0, 2.0])).unwrap();
        // Ridge picks the symmetric split.
        assert!((x[0] - x[1]).abs() < 1e-6);
    }

    #[test]
    fn non_finite_is_rank_deficient() {
        let g = DMatrix::from_row_slice(1, 1, &[f64::NAN]);
        assert!(matches!(GramSolver::new(g), Err(Error::RankDeficient(_))));
    }
}
