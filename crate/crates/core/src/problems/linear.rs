use std::fmt;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{ChiSquared as ChiSquaredDist, Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::design::{CovariateDistribution, CovariateSpace, DesignMatrix};
use crate::error::{invalid, Error, Result};
use crate::procedures::{dot, CellStats, SimRng, SimulationOracle};

/// Settings shared by every benchmark problem.
pub const BENCHMARK_ALPHA: f64 = 0.05;
pub const BENCHMARK_DELTA: f64 = 1.0;
pub const BENCHMARK_N0: usize = 50;
/// Seed for the random coefficients of the non-GSC benchmark problem.
pub const NON_GSC_SEED: u64 = 20170929;
/// Number of benchmark problems, ids `0..BENCHMARK_COUNT`.
pub const BENCHMARK_COUNT: usize = 9;

/// A user-supplied noise standard deviation `σ(i, x)`.
pub type SigmaFn = Arc<dyn Fn(usize, &[f64]) -> f64 + Send + Sync>;

/// Standard deviation of the sampling error.
#[derive(Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Noise {
    /// Constant `σ_i` per alternative.
    Hom { sigma: Vec<f64> },
    /// `σ_i(x) = scale · xᵀβ_i`.
    Proportional { scale: f64 },
    #[serde(skip)]
    Custom(SigmaFn),
}

impl fmt::Debug for Noise {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Noise::Hom { sigma } => f.debug_struct("Hom").field("sigma", sigma).finish(),
            Noise::Proportional { scale } => f.debug_struct("Proportional").field("scale", scale).finish(),
            Noise::Custom(_) => f.write_str("Custom(..)"),
        }
    }
}

impl PartialEq for Noise {
    fn eq(&self, other: &Self) -> bool {
        match (self, other) {
            (Noise::Hom { sigma: a }, Noise::Hom { sigma: b }) => a == b,
            (Noise::Proportional { scale: a }, Noise::Proportional { scale: b }) => a == b,
            (Noise::Custom(a), Noise::Custom(b)) => Arc::ptr_eq(a, b),
            _ => false,
        }
    }
}

/// A linear ground truth `𝒴_i(x) = xᵀβ_i` with Gaussian sampling error.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "LinearProblemSpec", into = "LinearProblemSpec")]
pub struct LinearProblem {
    name: String,
    beta: Vec<Vec<f64>>,
    noise: Noise,
    distribution: CovariateDistribution,
    space: CovariateSpace,
    design: DesignMatrix,
}

/// Serialized form of [`LinearProblem`]; design points omit the intercept.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LinearProblemSpec {
    #[serde(default)]
    pub name: String,
    pub beta: Vec<Vec<f64>>,
    pub noise: Noise,
    pub distribution: CovariateDistribution,
    /// Defaults to the product of the marginal supports.
    #[serde(default)]
    pub space: Option<CovariateSpace>,
    pub design: Vec<Vec<f64>>,
}

impl TryFrom<LinearProblemSpec> for LinearProblem {
    type Error = Error;
    fn try_from(spec: LinearProblemSpec) -> Result<Self> {
        let space = spec.space.unwrap_or_else(|| spec.distribution.space());
        let design = DesignMatrix::from_covariates(&spec.design)?;
        let mut p = LinearProblem::new(spec.beta, spec.noise, spec.distribution, space, design)?;
        p.name = spec.name;
        Ok(p)
    }
}

impl From<LinearProblem> for LinearProblemSpec {
    fn from(p: LinearProblem) -> Self {
        Self {
            name: p.name,
            beta: p.beta,
            noise: p.noise,
            distribution: p.distribution,
            space: Some(p.space),
            design: p.design.rows().iter().map(|r| r[1..].to_vec()).collect(),
        }
    }
}

impl LinearProblem {
    pub fn new(
        beta: Vec<Vec<f64>>,
        noise: Noise,
        distribution: CovariateDistribution,
        space: CovariateSpace,
        design: DesignMatrix,
    ) -> Result<Self> {
        let d = design.d();
        if beta.is_empty() {
            return Err(invalid("problem needs at least one alternative"));
        }
        for b in &beta {
            if b.len() != d + 1 {
                return Err(Error::DimensionMismatch {
                    expected: d + 1,
                    actual: b.len(),
                });
            }
            if b.iter().any(|v| !v.is_finite()) {
                return Err(invalid("coefficients must be finite"));
            }
        }
        distribution.check_within(&space)?;
        for (j, x) in design.rows().iter().enumerate() {
            if !space.contains(x) {
                return Err(invalid(format!("design point {j} lies outside the covariate space")));
            }
        }
        let problem = Self {
            name: String::new(),
            beta,
            noise,
            distribution,
            space,
            design,
        };
        problem.validate_noise()?;
        Ok(problem)
    }

    fn validate_noise(&self) -> Result<()> {
        match &self.noise {
            Noise::Hom { sigma } => {
                if sigma.len() != self.k() {
                    return Err(Error::DimensionMismatch {
                        expected: self.k(),
                        actual: sigma.len(),
                    });
                }
                if sigma.iter().any(|s| !(*s > 0.0 && s.is_finite())) {
                    return Err(invalid("homoscedastic noise needs every σ_i > 0"));
                }
            }
            Noise::Proportional { scale } => {
                if !(*scale > 0.0 && scale.is_finite()) {
                    return Err(invalid("noise scale must be positive"));
                }
                // linear in x, so the extreme points bound it over the space;
                // zero is allowed (a noiseless corner)
                for x in self.space.corners()? {
                    for (i, b) in self.beta.iter().enumerate() {
                        if dot(&x, b) < 0.0 {
                            return Err(invalid(format!(
                                "proportional noise is negative for alternative {i} at {x:?}"
                            )));
                        }
                    }
                }
            }
            Noise::Custom(f) => {
                let corners = self.space.corners().unwrap_or_default();
                for x in self.design.rows().iter().chain(&corners) {
                    for i in 0..self.k() {
                        let s = f(i, x);
                        if !(s >= 0.0 && s.is_finite()) {
                            return Err(invalid(format!(
                                "custom noise is {s} for alternative {i} at {x:?}"
                            )));
                        }
                    }
                }
            }
        }
        Ok(())
    }

    pub fn with_name(mut self, name: impl Into<String>) -> Self {
        self.name = name.into();
        self
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn k(&self) -> usize {
        self.beta.len()
    }

    pub fn d(&self) -> usize {
        self.design.d()
    }

    pub fn beta(&self) -> &[Vec<f64>] {
        &self.beta
    }

    pub fn noise(&self) -> &Noise {
        &self.noise
    }

    pub fn distribution(&self) -> &CovariateDistribution {
        &self.distribution
    }

    pub fn space(&self) -> &CovariateSpace {
        &self.space
    }

    pub fn design(&self) -> &DesignMatrix {
        &self.design
    }

    /// `xᵀβ_i` for every alternative.
    pub fn means(&self, x: &[f64]) -> Vec<f64> {
        self.beta.iter().map(|b| dot(b, x)).collect()
    }

    /// `σ_i(x)`.
    pub fn sigma(&self, i: usize, x: &[f64]) -> f64 {
        match &self.noise {
            Noise::Hom { sigma } => sigma[i],
            Noise::Proportional { scale } => scale * dot(&self.beta[i], x),
            Noise::Custom(f) => f(i, x),
        }
    }

    /// `𝒴_{i*}(x) − 𝒴_j(x)`, differencing coefficients before the inner
    /// product so a constant gap (as in the GSC) is reproduced exactly.
    pub fn gap(&self, x: &[f64], selected: usize) -> f64 {
        let best = true_best(self, x)[0];
        self.beta[best]
            .iter()
            .zip(&self.beta[selected])
            .zip(x)
            .map(|((a, b), xi)| (a - b) * xi)
            .sum()
    }
}

/// Inferior alternatives share β₁'s slopes with the intercept lowered by exactly δ.
pub fn make_gsc(k: usize, d: usize, delta: f64, base: &[f64]) -> Result<Vec<Vec<f64>>> {
    if k < 2 {
        return Err(invalid(format!("need at least 2 alternatives, got {k}")));
    }
    if !(delta > 0.0 && delta.is_finite()) {
        return Err(invalid(format!("delta must be positive, got {delta}")));
    }
    if base.len() != d + 1 {
        return Err(Error::DimensionMismatch {
            expected: d + 1,
            actual: base.len(),
        });
    }
    let mut inferior = base.to_vec();
    inferior[0] -= delta;
    let mut out = vec![base.to_vec()];
    out.extend(std::iter::repeat_n(inferior, k - 1));
    Ok(out)
}

/// Every alternative whose mean at `x` equals the maximum (0-based).
pub fn true_best(problem: &LinearProblem, x: &[f64]) -> Vec<usize> {
    let means = problem.means(x);
    let max = means.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    (0..means.len()).filter(|&i| means[i] == max).collect()
}

/// Short display name of a benchmark problem.
pub fn benchmark_name(id: usize) -> Result<&'static str> {
    Ok(match id {
        0 => "Benchmark",
        1 => "k=2",
        2 => "k=8",
        3 => "Non-GSC",
        4 => "IV",
        5 => "DV",
        6 => "Het",
        7 => "d=1",
        8 => "d=5",
        _ => return Err(Error::UnknownProblem(id)),
    })
}

/// The benchmark problem (`id = 0`) and its eight one-factor variants.
///
/// The benchmark has `k = 5`, `d = 3`, i.i.d. `U[0,1]` covariates, the
/// `{0, 0.5}^d` factorial design, GSC means with `β₁ = (1, …, 1)` and
/// `δ = 1`, and homoscedastic `σ_i = 10`.
pub fn benchmark_problem(id: usize) -> Result<LinearProblem> {
    let name = benchmark_name(id)?;
    let (k, d) = match id {
        1 => (2, 3),
        2 => (8, 3),
        7 => (5, 1),
        8 => (5, 5),
        _ => (5, 3),
    };
    let beta = if id == 3 {
        let mut rng = ChaCha8Rng::seed_from_u64(NON_GSC_SEED);
        (0..k)
            .map(|_| (0..=d).map(|_| 5.0 * rng.random::<f64>()).collect())
            .collect()
    } else {
        make_gsc(k, d, BENCHMARK_DELTA, &vec![1.0; d + 1])?
    };
    let noise = match id {
        4 => Noise::Hom {
            sigma: vec![5.0, 7.5, 10.0, 12.5, 15.0],
        },
        5 => Noise::Hom {
            sigma: vec![15.0, 12.5, 10.0, 7.5, 5.0],
        },
        6 => Noise::Proportional { scale: 10.0 },
        _ => Noise::Hom { sigma: vec![10.0; k] },
    };
    Ok(LinearProblem::new(
        beta,
        noise,
        CovariateDistribution::uniform_cube(0.0, 1.0, d)?,
        CovariateSpace::cube(0.0, 1.0, d)?,
        DesignMatrix::factorial(&[0.0, 0.5], d)?,
    )?
    .with_name(name))
}

/// Gaussian sampling oracle for a [`LinearProblem`].
#[derive(Debug, Clone)]
pub struct LinearOracle {
    problem: Arc<LinearProblem>,
    per_draw: bool,
}

impl LinearOracle {
    /// By default batches are drawn as sufficient statistics: the mean of
    /// `n` draws is `N(μ, σ²/n)` and the sum of squared deviations is
    /// `σ²χ²_{n−1}`, independently.
    pub fn new(problem: Arc<LinearProblem>) -> Self {
        Self {
            problem,
            per_draw: false,
        }
    }

    /// Draw every observation individually instead.
    pub fn per_draw(mut self) -> Self {
        self.per_draw = true;
        self
    }

    pub fn problem(&self) -> &LinearProblem {
        &self.problem
    }
}

pub fn linear_oracle(problem: &LinearProblem) -> LinearOracle {
    LinearOracle::new(Arc::new(problem.clone()))
}

impl SimulationOracle for LinearOracle {
    fn k(&self) -> usize {
        self.problem.k()
    }

    fn sample(&self, alternative: usize, x: &[f64], rng: &mut SimRng) -> f64 {
        let z: f64 = StandardNormal.sample(rng);
        dot(&self.problem.beta[alternative], x) + self.problem.sigma(alternative, x) * z
    }

    fn describe(&self) -> String {
        format!(
            "linear problem '{}' (k = {}, d = {}, noise {:?})",
            self.problem.name,
            self.problem.k(),
            self.problem.d(),
            self.problem.noise
        )
    }

    fn sample_stats(&self, alternative: usize, x: &[f64], n: usize, rng: &mut SimRng) -> CellStats {
        if self.per_draw || n < 2 {
            let mut stats = CellStats::default();
            for _ in 0..n {
                stats.push(self.sample(alternative, x, rng));
            }
            return stats;
        }
        let mu = dot(&self.problem.beta[alternative], x);
        let sigma = self.problem.sigma(alternative, x);
        let z: f64 = StandardNormal.sample(rng);
        let chi = ChiSquaredDist::new((n - 1) as f64)
            .expect("positive degrees of freedom")
            .sample(rng);
        CellStats {
            n,
            mean: mu + sigma * z / (n as f64).sqrt(),
            ss: sigma * sigma * chi,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::procedures::{Stage, Substreams};

    #[test]
    fn gsc_gap_is_exact() {
        let beta = make_gsc(5, 3, 1.0, &[1.0; 4]).unwrap();
        assert_eq!(beta[0], vec![1.0; 4]);
        assert_eq!(beta[3], vec![0.0, 1.0, 1.0, 1.0]);
        let p = benchmark_problem(0).unwrap();
        for x in [[1.0, 0.3, 0.7, 0.11], [1.0, 1.0, 1.0, 1.0], [1.0, 0.0, 0.0, 0.0]] {
            assert_eq!(true_best(&p, &x), vec![0]);
            for i in 1..5 {
                assert_eq!(p.gap(&x, i), 1.0);
            }
            assert_eq!(p.gap(&x, 0), 0.0);
        }
        assert!(make_gsc(1, 3, 1.0, &[1.0; 4]).is_err());
        assert!(make_gsc(3, 3, 0.0, &[1.0; 4]).is_err());
    }

    #[test]
    fn slippage_configuration() {
        let beta = make_gsc(3, 2, 0.5, &[2.0, 0.0, 0.0]).unwrap();
        assert_eq!(beta[1], vec![1.5, 0.0, 0.0]);
    }

    #[test]
    fn ties_reported() {
        let p = LinearProblem::new(
            vec![vec![1.0, 2.0], vec![1.0, 2.0], vec![0.0, 2.0]],
            Noise::Hom { sigma: vec![1.0; 3] },
            CovariateDistribution::uniform_cube(0.0, 1.0, 1).unwrap(),
            CovariateSpace::cube(0.0, 1.0, 1).unwrap(),
            DesignMatrix::factorial(&[0.0, 0.5], 1).unwrap(),
        )
        .unwrap();
        assert_eq!(true_best(&p, &[1.0, 0.4]), vec![0, 1]);
    }

    #[test]
    fn benchmark_catalogue() {
        let p0 = benchmark_problem(0).unwrap();
        assert_eq!((p0.k(), p0.d(), p0.design().m()), (5, 3, 8));
        assert_eq!(p0.noise(), &Noise::Hom { sigma: vec![10.0; 5] });
        assert_eq!(benchmark_problem(1).unwrap().k(), 2);
        assert_eq!(benchmark_problem(2).unwrap().k(), 8);
        assert_eq!(
            benchmark_problem(4).unwrap().noise(),
            &Noise::Hom {
                sigma: vec![5.0, 7.5, 10.0, 12.5, 15.0]
            }
        );
        assert_eq!(benchmark_problem(6).unwrap().noise(), &Noise::Proportional { scale: 10.0 });
        assert_eq!(benchmark_problem(7).unwrap().design().m(), 2);
        assert_eq!(benchmark_problem(8).unwrap().design().m(), 32);
        assert_eq!(benchmark_problem(9), Err(Error::UnknownProblem(9)));
        let p3 = benchmark_problem(3).unwrap();
        assert!(p3.beta().iter().flatten().all(|b| (0.0..5.0).contains(b)));
        // the intercepts decide at the origin
        let best = true_best(&p3, &[1.0, 0.0, 0.0, 0.0])[0];
        let intercepts: Vec<f64> = p3.beta().iter().map(|b| b[0]).collect();
        assert!(intercepts.iter().all(|&b| b <= intercepts[best]));
    }

    #[test]
    fn invalid_noise_rejected() {
        let mk = |noise| {
            LinearProblem::new(
                vec![vec![1.0, -2.0], vec![1.0, 1.0]],
                noise,
                CovariateDistribution::uniform_cube(0.0, 1.0, 1).unwrap(),
                CovariateSpace::cube(0.0, 1.0, 1).unwrap(),
                DesignMatrix::factorial(&[0.0, 0.5], 1).unwrap(),
            )
        };
        assert!(mk(Noise::Hom { sigma: vec![1.0, 0.0] }).is_err());
        assert!(mk(Noise::Hom { sigma: vec![1.0] }).is_err());
        assert!(mk(Noise::Proportional { scale: 1.0 }).is_err());
        assert!(mk(Noise::Custom(Arc::new(|_, _| -1.0))).is_err());
        assert!(mk(Noise::Custom(Arc::new(|_, x: &[f64]| 1.0 + x[1]))).is_ok());
    }

    #[test]
    fn design_must_lie_in_space() {
        let r = LinearProblem::new(
            vec![vec![1.0, 1.0]; 2],
            Noise::Hom { sigma: vec![1.0; 2] },
            CovariateDistribution::uniform_cube(0.0, 1.0, 1).unwrap(),
            CovariateSpace::cube(0.0, 1.0, 1).unwrap(),
            DesignMatrix::factorial(&[0.0, 2.0], 1).unwrap(),
        );
        assert!(r.is_err());
    }

    #[test]
    fn tiny_noise_gives_means() {
        let mut p = benchmark_problem(0).unwrap();
        p.noise = Noise::Hom { sigma: vec![1e-12; 5] };
        let oracle = linear_oracle(&p);
        let mut rng = Substreams::new(1, 0).stream(0, 0, Stage::First);
        let x = [1.0, 0.2, 0.4, 0.6];
        for i in 0..5 {
            assert!((oracle.sample(i, &x, &mut rng) - dot(&p.beta[i], &x)).abs() < 1e-10);
        }
    }

    #[test]
    fn sampling_moments() {
        let p = benchmark_problem(0).unwrap();
        let oracle = linear_oracle(&p).per_draw();
        let mut rng = Substreams::new(2, 0).stream(0, 0, Stage::First);
        let x = [1.0, 0.0, 0.0, 0.0];
        let stats = oracle.sample_stats(0, &x, 100_000, &mut rng);
        assert!((stats.mean - 1.0).abs() < 0.1);
        assert!((stats.variance().unwrap().sqrt() - 10.0).abs() < 0.2);
    }

    #[test]
    fn proportional_noise_scales_with_mean() {
        let p = benchmark_problem(6).unwrap();
        let oracle = linear_oracle(&p).per_draw();
        let lo = [1.0, 0.0, 0.0, 0.0];
        let hi = [1.0, 1.0, 1.0, 1.0];
        let mut rng = Substreams::new(3, 0).stream(0, 0, Stage::First);
        let s_lo = oracle.sample_stats(0, &lo, 50_000, &mut rng).variance().unwrap().sqrt();
        let s_hi = oracle.sample_stats(0, &hi, 50_000, &mut rng).variance().unwrap().sqrt();
        // σ = 10·xᵀβ₁: 10 at the origin, 40 at the far corner
        assert!((s_hi / s_lo - 4.0).abs() < 0.1);
        assert_eq!(p.sigma(1, &lo), 0.0);
    }

    #[test]
    fn batched_stats_match_per_draw_distribution() {
        let p = benchmark_problem(0).unwrap();
        let fast = linear_oracle(&p);
        let slow = linear_oracle(&p).per_draw();
        let x = [1.0, 0.5, 0.5, 0.5];
        let reps = 4000;
        let summarize = |o: &LinearOracle| {
            let mut m = CellStats::default();
            let mut v = CellStats::default();
            for r in 0..reps {
                let mut rng = Substreams::new(9, r).stream(0, 0, Stage::First);
                let s = o.sample_stats(0, &x, 20, &mut rng);
                m.push(s.mean);
                v.push(s.variance().unwrap());
            }
            (m.mean, m.variance().unwrap(), v.mean)
        };
        let (fm, fv, fs) = summarize(&fast);
        let (sm, sv, ss) = summarize(&slow);
        // mean 2.5, var of mean 100/20 = 5, mean of S² = 100
        for (a, b, tol) in [(fm, sm, 0.2), (fv, sv, 0.6), (fs, ss, 3.0)] {
            assert!((a - b).abs() < tol, "{a} vs {b}");
        }
        assert!((fm - 2.5).abs() < 0.15 && (fs - 100.0).abs() < 2.5);
    }

    #[test]
    fn serde_roundtrip() {
        let p = benchmark_problem(4).unwrap();
        let text = toml::to_string(&Wrap { problem: p.clone() }).unwrap();
        let back: Wrap = toml::from_str(&text).unwrap();
        assert_eq!(back.problem, p);
    }

    #[derive(Serialize, Deserialize)]
    struct Wrap {
        problem: LinearProblem,
    }
}
