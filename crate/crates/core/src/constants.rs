//! Critical constants `h` for the two procedures.
//!
//! Both the homoscedastic and heteroscedastic lower bounds on the conditional
//! PCS depend on `h` and `v = xᵀ(XᵀX)⁻¹x` only through `c = h/√v`:
//!
//! ```text
//! G(c) = ∫ [ ∫ Φ(c / √(ν(1/t + 1/s))) p(s) ds ]^{k-1} p(t) dt
//! ```
//!
//! where `p` is the χ²_ν density (hom) or the density of the smallest of `m`
//! χ²_ν variables (het). A fixed density rule turns the double integral into
//! a double sum whose kernel is precomputed once, and the expectation form
//! evaluates a Chebyshev interpolant of `G` at precomputed `V(X)` nodes.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::design::{
    max_quadratic, CovariateDistribution, CovariateNodes, CovariateSpace, DesignMatrix, ExpectationScheme,
};
use crate::error::{invalid, Error, Result};
use crate::numerics::{
    find_root, normal_cdf, widen_until_sign_change, ChiSquared, Chebyshev, DensityRule, MinOfChiSquared,
    QuadratureSpec, RootBracket,
};

/// Absolute tolerance on `h`.
pub const H_TOLERANCE: f64 = 1e-4;
/// Initial root bracket for `h`.
pub const H_BRACKET: (f64, f64) = (1e-3, 50.0);

/// Once `1 - G(c)` drops below this the bound is treated as 1.
const SATURATION: f64 = 1e-13;
const MAX_CHEB_POINTS: usize = 2048;
const CHEB_TAIL_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VarianceMode {
    Hom,
    Het,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PcsForm {
    Expectation,
    Minimum,
}

impl std::fmt::Display for VarianceMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            VarianceMode::Hom => "hom",
            VarianceMode::Het => "het",
        })
    }
}

impl std::fmt::Display for PcsForm {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            PcsForm::Expectation => "expectation",
            PcsForm::Minimum => "minimum",
        })
    }
}

/// Everything needed to solve for `h`.
#[derive(Debug, Clone)]
pub struct HProblem {
    pub mode: VarianceMode,
    pub form: PcsForm,
    pub k: usize,
    pub n0: usize,
    pub design: DesignMatrix,
    /// Required for the expectation form.
    pub distribution: Option<CovariateDistribution>,
    /// Required for the minimum form.
    pub space: Option<CovariateSpace>,
    pub alpha: f64,
    pub scheme: ExpectationScheme,
    pub quad: QuadratureSpec,
}

impl HProblem {
    /// A problem with default scheme and quadrature and no covariate model;
    /// attach one with [`HProblem::with_distribution`] or [`HProblem::with_space`].
    pub fn new(mode: VarianceMode, form: PcsForm, k: usize, n0: usize, design: DesignMatrix, alpha: f64) -> Self {
        let d = design.d();
        Self {
            mode,
            form,
            k,
            n0,
            design,
            distribution: None,
            space: None,
            alpha,
            scheme: ExpectationScheme::default_for(d),
            quad: QuadratureSpec::default(),
        }
    }

    pub fn with_distribution(mut self, dist: CovariateDistribution) -> Self {
        self.distribution = Some(dist);
        self
    }

    pub fn with_space(mut self, space: CovariateSpace) -> Self {
        self.space = Some(space);
        self
    }

    pub fn with_scheme(mut self, scheme: ExpectationScheme) -> Self {
        self.scheme = scheme;
        self
    }

    pub fn with_quadrature(mut self, quad: QuadratureSpec) -> Self {
        self.quad = quad;
        self
    }

    /// Degrees of freedom of the variance estimators: `n₀m − d − 1` (hom)
    /// or `n₀ − 1` (het).
    pub fn dof(&self) -> Result<u64> {
        dof_for(self.mode, self.n0, self.design.m(), self.design.d())
    }

    pub fn validate(&self) -> Result<()> {
        check_k_alpha(self.k, self.alpha)?;
        self.dof()?;
        self.quad.validate()?;
        match self.form {
            PcsForm::Expectation => {
                let dist = self
                    .distribution
                    .as_ref()
                    .ok_or_else(|| invalid("expectation form needs a covariate distribution"))?;
                if dist.d() != self.design.d() {
                    return Err(Error::DimensionMismatch {
                        expected: self.design.d(),
                        actual: dist.d(),
                    });
                }
            }
            PcsForm::Minimum => {
                let space = self
                    .space
                    .as_ref()
                    .ok_or_else(|| invalid("minimum form needs a covariate space"))?;
                if space.d() != self.design.d() {
                    return Err(Error::DimensionMismatch {
                        expected: self.design.d(),
                        actual: space.d(),
                    });
                }
            }
        }
        Ok(())
    }
}

fn check_k_alpha(k: usize, alpha: f64) -> Result<()> {
    if k < 2 {
        return Err(invalid(format!("need at least 2 alternatives, got k = {k}")));
    }
    let upper = 1.0 - 1.0 / k as f64;
    if !(alpha > 0.0 && alpha < upper) {
        return Err(invalid(format!(
            "alpha must lie in (0, 1 - 1/k) = (0, {upper}), got {alpha}"
        )));
    }
    Ok(())
}

fn dof_for(mode: VarianceMode, n0: usize, m: usize, d: usize) -> Result<u64> {
    match mode {
        VarianceMode::Hom => {
            let nu = (n0 * m) as i64 - d as i64 - 1;
            if nu < 1 {
                return Err(invalid(format!(
                    "homoscedastic mode needs n0·m − d − 1 ≥ 1, got {nu}"
                )));
            }
            Ok(nu as u64)
        }
        VarianceMode::Het => {
            if n0 < 2 {
                return Err(invalid(format!("heteroscedastic mode needs n0 ≥ 2, got {n0}")));
            }
            Ok(n0 as u64 - 1)
        }
    }
}

/// The bound `G(c)` discretized on a fixed density rule.
#[derive(Debug, Clone)]
pub struct PcsBound {
    k: usize,
    dof: u64,
    weights: Vec<f64>,
    /// `1/√(ν(1/tₐ + 1/t_b))`, row-major.
    kernel: Vec<f64>,
    n: usize,
}

impl PcsBound {
    pub fn new(mode: VarianceMode, k: usize, n0: usize, m: usize, d: usize, quad: &QuadratureSpec) -> Result<Self> {
        if k < 1 {
            return Err(invalid("need at least one alternative"));
        }
        let dof = dof_for(mode, n0, m, d)?;
        let nu = dof as f64;
        let rule = match mode {
            VarianceMode::Hom => {
                let chi = ChiSquared::new(dof)?;
                DensityRule::build(|t| chi.pdf(t), nu, quad)?
            }
            VarianceMode::Het => {
                let min = MinOfChiSquared::new(dof, m as u64)?;
                DensityRule::build(|t| min.pdf(t), nu, quad)?
            }
        };
        let mass = rule.mass();
        let weights: Vec<f64> = rule.weights().iter().map(|w| w / mass).collect();
        let t = rule.nodes();
        let n = t.len();
        let kernel = (0..n)
            .into_par_iter()
            .flat_map_iter(|a| {
                let ta = t[a];
                t.iter().map(move |&tb| 1.0 / (nu * (1.0 / ta + 1.0 / tb)).sqrt())
            })
            .collect();
        Ok(Self {
            k,
            dof,
            weights,
            kernel,
            n,
        })
    }

    pub fn for_problem(prob: &HProblem) -> Result<Self> {
        Self::new(prob.mode, prob.k, prob.n0, prob.design.m(), prob.design.d(), &prob.quad)
    }

    pub fn dof(&self) -> u64 {
        self.dof
    }

    /// Number of nodes in the density rule.
    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    /// `G(c)` for `c = h/√v ≥ 0`.
    pub fn g(&self, c: f64) -> f64 {
        let p = (self.k - 1) as i32;
        let terms: Vec<f64> = (0..self.n)
            .into_par_iter()
            .map(|a| {
                let row = &self.kernel[a * self.n..(a + 1) * self.n];
                let inner: f64 = row.iter().zip(&self.weights).map(|(r, w)| w * normal_cdf(c * r)).sum();
                self.weights[a] * inner.powi(p)
            })
            .collect();
        terms.iter().sum::<f64>().clamp(0.0, 1.0)
    }

    /// The bound at `(h, v)`.
    pub fn eval(&self, h: f64, v: f64) -> f64 {
        self.g(h / v.sqrt())
    }

    /// Chebyshev interpolant of `G` on `[0, c_max]`, with `c_max` chosen so
    /// that `G` is saturated beyond it.
    pub fn interpolant(&self) -> Result<Chebyshev> {
        let mut c_max = 8.0;
        while 1.0 - self.g(c_max) > SATURATION {
            c_max *= 2.0;
            if c_max > 1e6 {
                return Err(Error::NoConvergence {
                    what: "bound saturation search",
                    iterations: 18,
                    error: 1.0 - self.g(c_max),
                });
            }
        }
        let mut n = 64;
        loop {
            let pts = Chebyshev::points(0.0, c_max, n);
            let values: Vec<f64> = pts.iter().map(|&c| self.g(c)).collect();
            let cheb = Chebyshev::from_values(0.0, c_max, &values);
            if cheb.tail() < CHEB_TAIL_TOL {
                return Ok(cheb);
            }
            if n >= MAX_CHEB_POINTS {
                return Err(Error::NoConvergence {
                    what: "bound interpolation",
                    iterations: n,
                    error: cheb.tail(),
                });
            }
            n *= 2;
        }
    }
}

/// The conditional PCS lower bound at `(h, v)` for `prob`'s mode, `k`, `n₀` and design size.
pub fn pcs_bound_given_v(h: f64, v: f64, prob: &HProblem) -> Result<f64> {
    if !(h >= 0.0 && h.is_finite()) {
        return Err(invalid(format!("h must be nonnegative and finite, got {h}")));
    }
    if !(v > 0.0 && v.is_finite()) {
        return Err(invalid(format!("v must be positive and finite, got {v}")));
    }
    Ok(PcsBound::for_problem(prob)?.eval(h, v))
}

/// How the solved `h` was evaluated.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "form", rename_all = "snake_case")]
pub enum HDiagnostics {
    Expectation {
        /// Number of covariate nodes in the expectation.
        nodes: usize,
        /// `E[V(X)]` under the scheme.
        mean_v: f64,
    },
    Minimum {
        /// The PCS-minimizing covariate.
        x0: Vec<f64>,
        v_max: f64,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HSolution {
    pub h: f64,
    pub mode: VarianceMode,
    pub dof: u64,
    /// Size of the density rule used for the double integral.
    pub rule_nodes: usize,
    /// Value of the bound at the returned `h`.
    pub achieved: f64,
    pub diagnostics: HDiagnostics,
}

/// Solve the bound equation for `h` at target `1 − α`.
pub fn solve_h(prob: &HProblem) -> Result<HSolution> {
    prob.validate()?;
    let target = 1.0 - prob.alpha;
    let bound = PcsBound::for_problem(prob)?;
    let bracket = RootBracket::new(H_BRACKET.0, H_BRACKET.1)?;

    match prob.form {
        PcsForm::Minimum => {
            let space = prob.space.as_ref().expect("validated");
            let (x0, v_max) = max_quadratic(space, &prob.design)?;
            let f = |h: f64| bound.eval(h, v_max) - target;
            let bracket = widen_until_sign_change(f, bracket, 2.0, 30)?;
            let h = find_root(f, bracket, H_TOLERANCE)?;
            Ok(HSolution {
                h,
                mode: prob.mode,
                dof: bound.dof(),
                rule_nodes: bound.len(),
                achieved: bound.eval(h, v_max),
                diagnostics: HDiagnostics::Minimum { x0, v_max },
            })
        }
        PcsForm::Expectation => {
            let dist = prob.distribution.as_ref().expect("validated");
            let nodes = CovariateNodes::build(dist, &prob.scheme)?;
            let inv_sqrt_v: Vec<f64> = nodes
                .points
                .iter()
                .map(|x| 1.0 / prob.design.quadratic_unchecked(x).sqrt())
                .collect();
            let mean_v = nodes.expect(|x| prob.design.quadratic_unchecked(x));
            let g = bound.interpolant()?;
            let expected = |h: f64| -> f64 {
                inv_sqrt_v
                    .iter()
                    .zip(&nodes.weights)
                    .map(|(s, w)| w * g.eval(h * s))
                    .sum()
            };
            let f = |h: f64| expected(h) - target;
            let bracket = widen_until_sign_change(f, bracket, 2.0, 30)?;
            let h = find_root(f, bracket, H_TOLERANCE)?;
            Ok(HSolution {
                h,
                mode: prob.mode,
                dof: bound.dof(),
                rule_nodes: bound.len(),
                achieved: expected(h),
                diagnostics: HDiagnostics::Expectation {
                    nodes: nodes.len(),
                    mean_v,
                },
            })
        }
    }
}
