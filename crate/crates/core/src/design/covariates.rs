use rand::Rng;
use serde::{Deserialize, Serialize};

use super::matrix::{augment, DesignMatrix};
use crate::error::{invalid, Error, Result};
use crate::numerics::gauss_legendre;

const PMF_TOLERANCE: f64 = 1e-12;

/// One coordinate of the covariate support.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Dimension {
    Interval { lo: f64, hi: f64 },
    Finite { values: Vec<f64> },
}

impl Dimension {
    fn validate(&self, idx: usize) -> Result<()> {
        match self {
            Dimension::Interval { lo, hi } => {
                if lo.is_nan() || hi.is_nan() || lo > hi {
                    return Err(invalid(format!("dimension {idx}: interval [{lo}, {hi}] is empty")));
                }
            }
            Dimension::Finite { values } => {
                if values.is_empty() {
                    return Err(invalid(format!("dimension {idx}: finite set is empty")));
                }
                if values.iter().any(|v| !v.is_finite()) {
                    return Err(invalid(format!("dimension {idx}: finite set has non-finite values")));
                }
            }
        }
        Ok(())
    }

    /// Extreme points of the convex hull of this coordinate's support.
    fn extremes(&self, idx: usize) -> Result<Vec<f64>> {
        let (lo, hi) = match self {
            Dimension::Interval { lo, hi } => {
                if !(lo.is_finite() && hi.is_finite()) {
                    return Err(Error::UnboundedDomain(idx));
                }
                (*lo, *hi)
            }
            Dimension::Finite { values } => values
                .iter()
                .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| (a.min(v), b.max(v))),
        };
        Ok(if lo == hi { vec![lo] } else { vec![lo, hi] })
    }

    pub fn contains(&self, v: f64) -> bool {
        match self {
            Dimension::Interval { lo, hi } => v >= *lo && v <= *hi,
            Dimension::Finite { values } => values.iter().any(|&x| x == v),
        }
    }

    /// `(min, max)` of the support.
    pub fn bounds(&self) -> (f64, f64) {
        match self {
            Dimension::Interval { lo, hi } => (*lo, *hi),
            Dimension::Finite { values } => values
                .iter()
                .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| (a.min(v), b.max(v))),
        }
    }
}

/// Support of the covariates, a product of intervals and finite sets.
/// The intercept coordinate is implied.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<Dimension>", into = "Vec<Dimension>")]
pub struct CovariateSpace {
    dims: Vec<Dimension>,
}

impl TryFrom<Vec<Dimension>> for CovariateSpace {
    type Error = Error;
    fn try_from(dims: Vec<Dimension>) -> Result<Self> {
        Self::new(dims)
    }
}

impl From<CovariateSpace> for Vec<Dimension> {
    fn from(space: CovariateSpace) -> Self {
        space.dims
    }
}

impl CovariateSpace {
    pub fn new(dims: Vec<Dimension>) -> Result<Self> {
        for (i, d) in dims.iter().enumerate() {
            d.validate(i)?;
        }
        Ok(Self { dims })
    }

    /// `[lo, hi]^d`.
    pub fn cube(lo: f64, hi: f64, d: usize) -> Result<Self> {
        Self::new(vec![Dimension::Interval { lo, hi }; d])
    }

    pub fn dims(&self) -> &[Dimension] {
        &self.dims
    }

    pub fn d(&self) -> usize {
        self.dims.len()
    }

    /// Whether an augmented covariate lies in the space.
    pub fn contains(&self, x: &[f64]) -> bool {
        x.len() == self.d() + 1
            && x[0] == 1.0
            && self.dims.iter().zip(&x[1..]).all(|(dim, &v)| dim.contains(v))
    }

    /// Augmented extreme points of the convex hull, in lexicographic order.
    pub fn corners(&self) -> Result<Vec<Vec<f64>>> {
        let ext = self
            .dims
            .iter()
            .enumerate()
            .map(|(i, d)| d.extremes(i))
            .collect::<Result<Vec<_>>>()?;
        Ok(super::matrix::cartesian(&ext)
            .into_iter()
            .map(|c| augment(&c))
            .collect())
    }
}

/// Maximize `xᵀ(XᵀX)⁻¹x` over the space by enumerating the extreme points of
/// its convex hull; the quadratic form is convex so the maximum is attained
/// at one of them. Ties go to the lexicographically smallest corner.
pub fn max_quadratic(space: &CovariateSpace, design: &DesignMatrix) -> Result<(Vec<f64>, f64)> {
    if space.d() != design.d() {
        return Err(Error::DimensionMismatch {
            expected: design.d(),
            actual: space.d(),
        });
    }
    let mut best: Option<(Vec<f64>, f64)> = None;
    for corner in space.corners()? {
        let v = design.quadratic_unchecked(&corner);
        match &best {
            Some((_, bv)) if v <= *bv + 1e-12 * bv.abs() => {}
            _ => best = Some((corner, v)),
        }
    }
    best.ok_or_else(|| invalid("covariate space has no extreme points"))
}

/// Marginal distribution of a single covariate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Marginal {
    Uniform { lo: f64, hi: f64 },
    Triangular { lo: f64, mode: f64, hi: f64 },
    Discrete { values: Vec<f64>, probs: Vec<f64> },
}

impl Marginal {
    fn validate(&self, idx: usize) -> Result<()> {
        let bad = |msg: String| Err(invalid(format!("marginal {idx}: {msg}")));
        match self {
            Marginal::Uniform { lo, hi } => {
                if !(lo.is_finite() && hi.is_finite() && lo < hi) {
                    return bad(format!("uniform needs finite lo < hi, got [{lo}, {hi}]"));
                }
            }
            Marginal::Triangular { lo, mode, hi } => {
                if !(lo.is_finite() && hi.is_finite() && lo < hi && *lo <= *mode && *mode <= *hi) {
                    return bad(format!("triangular needs lo ≤ mode ≤ hi, lo < hi, got ({lo}, {mode}, {hi})"));
                }
            }
            Marginal::Discrete { values, probs } => {
                if values.is_empty() || values.len() != probs.len() {
                    return bad("discrete needs matching nonempty values and probs".into());
                }
                if values.iter().any(|v| !v.is_finite()) {
                    return bad("discrete values must be finite".into());
                }
                if probs.iter().any(|p| !(*p >= 0.0)) {
                    return bad("probabilities must be nonnegative".into());
                }
                let total: f64 = probs.iter().sum();
                if (total - 1.0).abs() > PMF_TOLERANCE {
                    return bad(format!("probabilities sum to {total}, not 1"));
                }
            }
        }
        Ok(())
    }

    pub fn mean(&self) -> f64 {
        match self {
            Marginal::Uniform { lo, hi } => 0.5 * (lo + hi),
            Marginal::Triangular { lo, mode, hi } => (lo + mode + hi) / 3.0,
            Marginal::Discrete { values, probs } => values.iter().zip(probs).map(|(v, p)| v * p).sum(),
        }
    }

    pub fn support(&self) -> Dimension {
        match self {
            Marginal::Uniform { lo, hi } | Marginal::Triangular { lo, hi, .. } => {
                Dimension::Interval { lo: *lo, hi: *hi }
            }
            Marginal::Discrete { values, .. } => Dimension::Finite {
                values: values.clone(),
            },
        }
    }

    /// Inverse distribution function.
    pub fn quantile(&self, u: f64) -> f64 {
        let u = u.clamp(0.0, 1.0);
        match self {
            Marginal::Uniform { lo, hi } => lo + u * (hi - lo),
            Marginal::Triangular { lo, mode, hi } => {
                let width = hi - lo;
                let split = (mode - lo) / width;
                if u < split {
                    lo + (u * width * (mode - lo)).sqrt()
                } else {
                    hi - ((1.0 - u) * width * (hi - mode)).sqrt()
                }
            }
            Marginal::Discrete { values, probs } => {
                let mut acc = 0.0;
                for (v, p) in values.iter().zip(probs) {
                    acc += p;
                    if u < acc {
                        return *v;
                    }
                }
                // u at (or rounding past) the top: last atom with positive mass
                values
                    .iter()
                    .zip(probs)
                    .rev()
                    .find(|(_, p)| **p > 0.0)
                    .map(|(v, _)| *v)
                    .unwrap_or(values[values.len() - 1])
            }
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match self {
            Marginal::Uniform { lo, hi } => lo + rng.random::<f64>() * (hi - lo),
            _ => self.quantile(rng.random::<f64>()),
        }
    }

    /// One-dimensional rule `Σ wᵢ g(vᵢ) ≈ E[g(X)]`: Gauss–Legendre with `n`
    /// nodes for uniforms, on each linear piece for triangulars, exact
    /// summation for discrete marginals.
    pub fn rule(&self, n: usize) -> (Vec<f64>, Vec<f64>) {
        match self {
            Marginal::Uniform { lo, hi } => {
                let (x, w) = gauss_legendre(n);
                let half = 0.5 * (hi - lo);
                (
                    x.iter().map(|&xi| lo + half * (xi + 1.0)).collect(),
                    w.iter().map(|&wi| 0.5 * wi).collect(),
                )
            }
            Marginal::Triangular { lo, mode, hi } => {
                let (x, w) = gauss_legendre(n);
                let pdf = |v: f64| {
                    if v < *mode {
                        2.0 * (v - lo) / ((hi - lo) * (mode - lo))
                    } else {
                        2.0 * (hi - v) / ((hi - lo) * (hi - mode))
                    }
                };
                let mut nodes = Vec::with_capacity(2 * n);
                let mut weights = Vec::with_capacity(2 * n);
                for (a, b) in [(*lo, *mode), (*mode, *hi)] {
                    if b <= a {
                        continue;
                    }
                    let half = 0.5 * (b - a);
                    for (xi, wi) in x.iter().zip(&w) {
                        let v = a + half * (xi + 1.0);
                        nodes.push(v);
                        weights.push(wi * half * pdf(v));
                    }
                }
                (nodes, weights)
            }
            Marginal::Discrete { values, probs } => (values.clone(), probs.clone()),
        }
    }
}

/// Independent marginals for the `d` covariates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<Marginal>", into = "Vec<Marginal>")]
pub struct CovariateDistribution {
    marginals: Vec<Marginal>,
}

impl TryFrom<Vec<Marginal>> for CovariateDistribution {
    type Error = Error;
    fn try_from(marginals: Vec<Marginal>) -> Result<Self> {
        Self::new(marginals)
    }
}

impl From<CovariateDistribution> for Vec<Marginal> {
    fn from(dist: CovariateDistribution) -> Self {
        dist.marginals
    }
}

impl CovariateDistribution {
    pub fn new(marginals: Vec<Marginal>) -> Result<Self> {
        for (i, m) in marginals.iter().enumerate() {
            m.validate(i)?;
        }
        Ok(Self { marginals })
    }

    /// i.i.d. `Uniform[lo, hi]` covariates.
    pub fn uniform_cube(lo: f64, hi: f64, d: usize) -> Result<Self> {
        Self::new(vec![Marginal::Uniform { lo, hi }; d])
    }

    pub fn marginals(&self) -> &[Marginal] {
        &self.marginals
    }

    pub fn d(&self) -> usize {
        self.marginals.len()
    }

    /// The product of the marginal supports.
    pub fn space(&self) -> CovariateSpace {
        CovariateSpace {
            dims: self.marginals.iter().map(Marginal::support).collect(),
        }
    }

    /// Check that every marginal's support lies inside `space`.
    pub fn check_within(&self, space: &CovariateSpace) -> Result<()> {
        if space.d() != self.d() {
            return Err(Error::DimensionMismatch {
                expected: space.d(),
                actual: self.d(),
            });
        }
        for (i, (m, dim)) in self.marginals.iter().zip(space.dims()).enumerate() {
            let ok = match (m.support(), dim) {
                (Dimension::Interval { lo, hi }, Dimension::Interval { lo: slo, hi: shi }) => {
                    lo >= *slo && hi <= *shi
                }
                (Dimension::Finite { values }, d) => values.iter().all(|&v| d.contains(v)),
                (Dimension::Interval { .. }, Dimension::Finite { .. }) => false,
            };
            if !ok {
                return Err(invalid(format!("marginal {i} support is not inside the covariate space")));
            }
        }
        Ok(())
    }

    /// Augmented mean vector `(1, E[X₁], …, E[X_d])`.
    pub fn mean_point(&self) -> Vec<f64> {
        augment(&self.marginals.iter().map(Marginal::mean).collect::<Vec<_>>())
    }

    /// Augmented draw `(1, X₁, …, X_d)`.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        let mut x = Vec::with_capacity(self.d() + 1);
        x.push(1.0);
        x.extend(self.marginals.iter().map(|m| m.sample(rng)));
        x
    }
}

/// Draw one augmented covariate vector.
pub fn sample_covariate<R: Rng + ?Sized>(dist: &CovariateDistribution, rng: &mut R) -> Vec<f64> {
    dist.sample(rng)
}
