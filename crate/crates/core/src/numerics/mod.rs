//! Special functions, quadrature and root finding.
//!
//! Everything here is a pure function of its inputs and safe to call from any
//! number of threads.

mod interp;
mod quadrature;
mod roots;
mod special;

pub use interp::Chebyshev;
pub use quadrature::{
    gauss_legendre, integrate, integrate_semi_infinite, integrate_semi_infinite_scaled, DensityRule,
    Integral, QuadratureSpec,
};
pub use roots::{find_root, widen_until_sign_change, RootBracket};
pub use special::{
    chisq_cdf, chisq_pdf, gamma_p, gamma_q, ln_gamma, min_order_stat_pdf, normal_cdf, ChiSquared,
    MinOfChiSquared,
};
