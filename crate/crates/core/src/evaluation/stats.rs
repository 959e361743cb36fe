use serde::{Deserialize, Serialize};

use crate::constants::VarianceMode;
use crate::error::{invalid, Result};
use crate::numerics::normal_cdf;
use crate::problems::{LinearOracle, LinearProblem};
use crate::procedures::{dot, run_procedure, ProcedureConfig, StageSizes, Substreams};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KsResult {
    pub statistic: f64,
    pub p_value: f64,
}

/// `P(K > λ)` for the Kolmogorov distribution.
pub fn kolmogorov_survival(lambda: f64) -> f64 {
    if lambda <= 0.0 {
        return 1.0;
    }
    if lambda < 0.2 {
        // the alternating series is useless here and the value is 1 to double precision
        return 1.0;
    }
    let mut sum = 0.0;
    for j in 1..=100 {
        let term = (-2.0 * (j * j) as f64 * lambda * lambda).exp();
        sum += if j % 2 == 1 { term } else { -term };
        if term < 1e-17 {
            break;
        }
    }
    (2.0 * sum).clamp(0.0, 1.0)
}

/// One-sample Kolmogorov–Smirnov test against the standard normal, with the
/// usual finite-sample correction to the asymptotic p-value.
pub fn ks_normal(samples: &[f64]) -> Result<KsResult> {
    if samples.is_empty() || samples.iter().any(|v| !v.is_finite()) {
        return Err(invalid("KS test needs a non-empty sample of finite values"));
    }
    let mut s = samples.to_vec();
    s.sort_by(f64::total_cmp);
    let n = s.len() as f64;
    let statistic = s
        .iter()
        .enumerate()
        .map(|(i, &v)| {
            let f = normal_cdf(v);
            (f - i as f64 / n).max((i + 1) as f64 / n - f)
        })
        .fold(0.0, f64::max);
    let sqrt_n = n.sqrt();
    let lambda = (sqrt_n + 0.12 + 0.11 / sqrt_n) * statistic;
    Ok(KsResult {
        statistic,
        p_value: kolmogorov_survival(lambda),
    })
}

/// Standardized estimates `(xᵀβ̂ − xᵀβ) / sd` of alternative `alt` at `x`
/// across `reps` runs, where `sd` uses the true variances and the realized
/// (first-stage dependent) sample sizes. Under normal noise these are
/// exactly standard normal.
pub fn stein_statistics(
    mode: VarianceMode,
    problem: &LinearProblem,
    config: &ProcedureConfig,
    x: &[f64],
    alt: usize,
    reps: usize,
    seed: u64,
) -> Result<Vec<f64>> {
    if alt >= problem.k() || x.len() != problem.d() + 1 {
        return Err(invalid("alternative or covariate does not fit the problem"));
    }
    let design = problem.design();
    let oracle = LinearOracle::new(std::sync::Arc::new(problem.clone())).per_draw();
    let truth = dot(&problem.beta()[alt], x);
    // c = xᵀ(XᵀX)⁻¹Xᵀ, so xᵀβ̂ = Σ_j c_j Ȳ_j
    let proj = design.projector();
    let c: Vec<f64> = (0..design.m())
        .map(|j| (0..x.len()).map(|r| x[r] * proj[(r, j)]).sum())
        .collect();
    let q: f64 = c.iter().map(|v| v * v).sum();
    (0..reps)
        .map(|r| {
            let streams = Substreams::new(seed, r as u64);
            let (rule, budget) = run_procedure(mode, &oracle, design, config, &streams)?;
            let est = dot(&rule.betas()[alt], x);
            let var = match (&budget.sizes, mode) {
                (StageSizes::PerAlternative(n), VarianceMode::Hom) => {
                    let sigma = problem.sigma(alt, &design.rows()[0]);
                    sigma * sigma * q / n[alt] as f64
                }
                (StageSizes::PerCell(n), VarianceMode::Het) => design
                    .rows()
                    .iter()
                    .zip(&c)
                    .zip(&n[alt])
                    .map(|((xj, cj), &nij)| {
                        let s = problem.sigma(alt, xj);
                        cj * cj * s * s / nij as f64
                    })
                    .sum(),
                _ => unreachable!("stage sizes follow the variance mode"),
            };
            Ok((est - truth) / var.sqrt())
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_distr::{Distribution, StandardNormal};

    #[test]
    fn kolmogorov_reference_values() {
        // classic critical values of the limiting distribution
        assert!((kolmogorov_survival(1.3581) - 0.05).abs() < 2e-4);
        assert!((kolmogorov_survival(1.6276) - 0.01).abs() < 1e-4);
        assert!((kolmogorov_survival(1.2238) - 0.10).abs() < 2e-4);
        assert_eq!(kolmogorov_survival(0.0), 1.0);
    }

    #[test]
    fn ks_accepts_normal_and_rejects_shift() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(4);
        let z: Vec<f64> = (0..5000).map(|_| StandardNormal.sample(&mut rng)).collect();
        assert!(ks_normal(&z).unwrap().p_value > 0.01);
        let shifted: Vec<f64> = z.iter().map(|v| v + 0.2).collect();
        assert!(ks_normal(&shifted).unwrap().p_value < 1e-6);
        // single point at the median: D = 1/2
        assert!((ks_normal(&[0.0]).unwrap().statistic - 0.5).abs() < 1e-15);
    }
}
