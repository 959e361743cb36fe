//! Design points, covariate supports and covariate distributions.

mod covariates;
mod expectation;
mod matrix;

pub use covariates::{
    max_quadratic, sample_covariate, CovariateDistribution, CovariateSpace, Dimension, Marginal,
};
pub use expectation::{expect_over_covariates, CovariateNodes, ExpectationScheme, DEFAULT_QMC_SEED};
pub use matrix::{augment, quadratic_form, DesignMatrix, MAX_CONDITION};
pub(crate) use matrix::cartesian;
