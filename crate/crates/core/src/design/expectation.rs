use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::covariates::CovariateDistribution;
use super::matrix::{cartesian, augment};
use crate::error::{invalid, Result};

/// How expectations over the covariate distribution are discretized.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ExpectationScheme {
    /// Tensor product of one-dimensional rules with `nodes` points per
    /// continuous coordinate (discrete coordinates are summed exactly).
    Tensor { nodes: usize },
    /// Randomly shifted Halton points.
    Qmc { points: usize, seed: u64 },
    /// Plain Monte Carlo.
    MonteCarlo { points: usize, seed: u64 },
}

/// Seed used by [`ExpectationScheme::default_for`] for the QMC shift.
pub const DEFAULT_QMC_SEED: u64 = 0x5eed_0dd5;

impl ExpectationScheme {
    /// Tensor rules in low dimension, QMC above four covariates where the
    /// tensor grid becomes too large.
    pub fn default_for(d: usize) -> Self {
        match d {
            0..=3 => ExpectationScheme::Tensor { nodes: 16 },
            4 => ExpectationScheme::Tensor { nodes: 10 },
            _ => ExpectationScheme::Qmc {
                points: 1 << 16,
                seed: DEFAULT_QMC_SEED,
            },
        }
    }

    fn validate(&self) -> Result<()> {
        let n = match self {
            ExpectationScheme::Tensor { nodes } => *nodes,
            ExpectationScheme::Qmc { points, .. } | ExpectationScheme::MonteCarlo { points, .. } => *points,
        };
        if n == 0 {
            return Err(invalid("expectation scheme needs at least one point"));
        }
        Ok(())
    }
}

/// Weighted augmented covariate points approximating the distribution.
#[derive(Debug, Clone, PartialEq)]
pub struct CovariateNodes {
    pub points: Vec<Vec<f64>>,
    pub weights: Vec<f64>,
}

impl CovariateNodes {
    pub fn build(dist: &CovariateDistribution, scheme: &ExpectationScheme) -> Result<Self> {
        scheme.validate()?;
        let d = dist.d();
        if d == 0 {
            return Ok(Self {
                points: vec![vec![1.0]],
                weights: vec![1.0],
            });
        }
        match scheme {
            ExpectationScheme::Tensor { nodes } => {
                let rules: Vec<_> = dist.marginals().iter().map(|m| m.rule(*nodes)).collect();
                let coords: Vec<Vec<f64>> = rules.iter().map(|(v, _)| v.clone()).collect();
                let ws: Vec<Vec<f64>> = rules.iter().map(|(_, w)| w.clone()).collect();
                let points = cartesian(&coords).iter().map(|p| augment(p)).collect();
                let weights = cartesian(&ws).iter().map(|w| w.iter().product()).collect();
                Ok(Self { points, weights })
            }
            ExpectationScheme::Qmc { points, seed } => {
                let mut rng = ChaCha8Rng::seed_from_u64(*seed);
                let shift: Vec<f64> = (0..d).map(|_| rng.random::<f64>()).collect();
                let bases = first_primes(d);
                let pts = (0..*points)
                    .map(|i| {
                        let mut x = Vec::with_capacity(d + 1);
                        x.push(1.0);
                        for (l, m) in dist.marginals().iter().enumerate() {
                            // skip index 0, which maps every base to the origin
                            let u = (radical_inverse(i as u64 + 1, bases[l]) + shift[l]).fract();
                            x.push(m.quantile(u));
                        }
                        x
                    })
                    .collect();
                Ok(Self {
                    points: pts,
                    weights: vec![1.0 / *points as f64; *points],
                })
            }
            ExpectationScheme::MonteCarlo { points, seed } => {
                let mut rng = ChaCha8Rng::seed_from_u64(*seed);
                let pts = (0..*points).map(|_| dist.sample(&mut rng)).collect();
                Ok(Self {
                    points: pts,
                    weights: vec![1.0 / *points as f64; *points],
                })
            }
        }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// `Σ wᵢ g(xᵢ)`.
    pub fn expect<F: FnMut(&[f64]) -> f64>(&self, mut g: F) -> f64 {
        self.points.iter().zip(&self.weights).map(|(x, w)| w * g(x)).sum()
    }
}

/// `E[g(X)]` under `dist` using `scheme`.
pub fn expect_over_covariates<F: FnMut(&[f64]) -> f64>(
    g: F,
    dist: &CovariateDistribution,
    scheme: &ExpectationScheme,
) -> Result<f64> {
    Ok(CovariateNodes::build(dist, scheme)?.expect(g))
}

fn radical_inverse(mut i: u64, base: u64) -> f64 {
    let inv = 1.0 / base as f64;
    let mut f = inv;
    let mut r = 0.0;
    while i > 0 {
        r += f * (i % base) as f64;
        i /= base;
        f *= inv;
    }
    r
}

fn first_primes(n: usize) -> Vec<u64> {
    let mut out = Vec::with_capacity(n);
    let mut c = 2u64;
    while out.len() < n {
        if out.iter().take_while(|&&p| p * p <= c).all(|&p| c % p != 0) {
            out.push(c);
        }
        c += 1;
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::design::{quadratic_form, DesignMatrix, Marginal};

    #[test]
    fn radical_inverse_base_two() {
        assert_eq!(radical_inverse(1, 2), 0.5);
        assert_eq!(radical_inverse(2, 2), 0.25);
        assert_eq!(radical_inverse(3, 2), 0.75);
        assert_eq!(first_primes(5), vec![2, 3, 5, 7, 11]);
    }

    #[test]
    fn expected_quadratic_on_benchmark() {
        // E[(1 + Σ(4Xₗ-1)²)/8] with Xₗ ~ U[0,1]: E[(4X-1)²] = 7/3
        let design = DesignMatrix::factorial(&[0.0, 0.5], 3).unwrap();
        let dist = CovariateDistribution::uniform_cube(0.0, 1.0, 3).unwrap();
        let exact = (1.0 + 3.0 * 7.0 / 3.0) / 8.0;
        let tensor = expect_over_covariates(
            |x| quadratic_form(x, &design).unwrap(),
            &dist,
            &ExpectationScheme::default_for(3),
        )
        .unwrap();
        assert!((tensor - exact).abs() < 1e-12);
        let qmc = expect_over_covariates(
            |x| quadratic_form(x, &design).unwrap(),
            &dist,
            &ExpectationScheme::Qmc { points: 1 << 14, seed: 3 },
        )
        .unwrap();
        assert!((qmc - exact).abs() < 1e-3);
        let mc = expect_over_covariates(
            |x| quadratic_form(x, &design).unwrap(),
            &dist,
            &ExpectationScheme::MonteCarlo { points: 1 << 14, seed: 3 },
        )
        .unwrap();
        assert!((mc - exact).abs() < 2e-2);
    }

    #[test]
    fn mixed_marginals_tensor() {
        let dist = CovariateDistribution::new(vec![
            Marginal::Discrete {
                values: vec![1.0, 2.0, 3.0],
                probs: vec![0.2, 0.3, 0.5],
            },
            Marginal::Triangular { lo: 0.0, mode: 0.59, hi: 1.0 },
        ])
        .unwrap();
        let nodes = CovariateNodes::build(&dist, &ExpectationScheme::Tensor { nodes: 6 }).unwrap();
        assert_eq!(nodes.len(), 3 * 12);
        let e = nodes.expect(|x| x[1] * x[2]);
        assert!((e - 2.3 * 0.53).abs() < 1e-12);
    }

    #[test]
    fn zero_points_rejected() {
        let dist = CovariateDistribution::uniform_cube(0.0, 1.0, 1).unwrap();
        assert!(CovariateNodes::build(&dist, &ExpectationScheme::Tensor { nodes: 0 }).is_err());
    }
}
