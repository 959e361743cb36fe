use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Largest accepted condition number of `XᵀX`.
pub const MAX_CONDITION: f64 = 1e12;

/// The `m × (d+1)` matrix of augmented design points together with the
/// cached inverse Gram matrix `(XᵀX)⁻¹` and least-squares projector `(XᵀX)⁻¹Xᵀ`.
#[derive(Debug, Clone, PartialEq)]
pub struct DesignMatrix {
    rows: Vec<Vec<f64>>,
    gram_inv: DMatrix<f64>,
    projector: DMatrix<f64>,
}

impl DesignMatrix {
    /// Build from augmented rows (leading coordinate exactly 1).
    pub fn new(rows: Vec<Vec<f64>>) -> Result<Self> {
        let m = rows.len();
        let Some(first) = rows.first() else {
            return Err(Error::SingularDesign("no design points".into()));
        };
        let p = first.len();
        if p == 0 {
            return Err(Error::SingularDesign("design points have no coordinates".into()));
        }
        for (j, row) in rows.iter().enumerate() {
            if row.len() != p {
                return Err(Error::DimensionMismatch {
                    expected: p,
                    actual: row.len(),
                });
            }
            if row[0] != 1.0 {
                return Err(Error::InvalidArgument(format!(
                    "design point {j} must have leading coordinate 1, got {}",
                    row[0]
                )));
            }
            if row.iter().any(|v| !v.is_finite()) {
                return Err(Error::InvalidArgument(format!("design point {j} is not finite")));
            }
        }
        if m < p {
            return Err(Error::SingularDesign(format!(
                "{m} design points cannot identify {p} coefficients"
            )));
        }

        let x = DMatrix::from_fn(m, p, |r, c| rows[r][c]);
        let gram = x.transpose() * &x;
        let singular = gram.clone().svd(false, false).singular_values;
        let smax = singular.max();
        let smin = singular.min();
        if !(smin > 0.0) || smax / smin > MAX_CONDITION {
            return Err(Error::SingularDesign(format!(
                "XᵀX has condition number {:e}",
                smax / smin
            )));
        }
        let gram_inv = gram
            .cholesky()
            .ok_or_else(|| Error::SingularDesign("XᵀX is not positive definite".into()))?
            .inverse();
        let projector = &gram_inv * x.transpose();
        Ok(Self {
            rows,
            gram_inv,
            projector,
        })
    }

    /// Build from raw covariate vectors, prepending the intercept coordinate.
    pub fn from_covariates(points: &[Vec<f64>]) -> Result<Self> {
        Self::new(points.iter().map(|p| augment(p)).collect())
    }

    /// Full factorial design: every combination of `levels` in each of `d`
    /// coordinates, in lexicographic order.
    pub fn factorial(levels: &[f64], d: usize) -> Result<Self> {
        let per_dim = vec![levels.to_vec(); d];
        Self::from_covariates(&cartesian(&per_dim))
    }

    /// Factorial design with per-dimension level sets.
    pub fn factorial_mixed(levels: &[Vec<f64>]) -> Result<Self> {
        Self::from_covariates(&cartesian(levels))
    }

    pub fn rows(&self) -> &[Vec<f64>] {
        &self.rows
    }

    pub fn m(&self) -> usize {
        self.rows.len()
    }

    /// Number of covariates (excluding the intercept).
    pub fn d(&self) -> usize {
        self.rows[0].len() - 1
    }

    pub fn gram_inverse(&self) -> &DMatrix<f64> {
        &self.gram_inv
    }

    /// `(XᵀX)⁻¹Xᵀ`, mapping a response vector over design points to coefficients.
    pub fn projector(&self) -> &DMatrix<f64> {
        &self.projector
    }

    /// `β = (XᵀX)⁻¹Xᵀ y`.
    pub fn project(&self, y: &[f64]) -> Result<Vec<f64>> {
        if y.len() != self.m() {
            return Err(Error::DimensionMismatch {
                expected: self.m(),
                actual: y.len(),
            });
        }
        let beta = &self.projector * DVector::from_column_slice(y);
        Ok(beta.iter().copied().collect())
    }

    /// `xᵀ(XᵀX)⁻¹x` without dimension checks.
    pub(crate) fn quadratic_unchecked(&self, x: &[f64]) -> f64 {
        let p = x.len();
        let mut acc = 0.0;
        for r in 0..p {
            let mut row = 0.0;
            for c in 0..p {
                row += self.gram_inv[(r, c)] * x[c];
            }
            acc += x[r] * row;
        }
        acc
    }
}

/// `xᵀ(XᵀX)⁻¹x` for an augmented covariate `x`.
pub fn quadratic_form(x: &[f64], design: &DesignMatrix) -> Result<f64> {
    if x.len() != design.d() + 1 {
        return Err(Error::DimensionMismatch {
            expected: design.d() + 1,
            actual: x.len(),
        });
    }
    Ok(design.quadratic_unchecked(x))
}

/// Prepend the intercept coordinate.
pub fn augment(x: &[f64]) -> Vec<f64> {
    let mut out = Vec::with_capacity(x.len() + 1);
    out.push(1.0);
    out.extend_from_slice(x);
    out
}

pub(crate) fn cartesian(levels: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let mut out: Vec<Vec<f64>> = vec![Vec::new()];
    for dim in levels {
        out = out
            .into_iter()
            .flat_map(|prefix| {
                dim.iter().map(move |&v| {
                    let mut p = prefix.clone();
                    p.push(v);
                    p
                })
            })
            .collect();
    }
    out
}
