use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::constants::VarianceMode;
use crate::design::{CovariateDistribution, CovariateSpace, DesignMatrix};
use crate::error::{invalid, Result};
use crate::problems::{linear_oracle, make_gsc, LinearProblem, Noise};
use crate::procedures::{ProcedureConfig, SimRng, Stage, Substreams};

use super::{run_experiment, Experiment, ExperimentPlan, PcsEstimate};

/// Inputs for comparing the GSC against configurations with wider gaps.
#[derive(Debug, Clone)]
pub struct LfcSetup {
    pub mode: VarianceMode,
    pub config: ProcedureConfig,
    /// Coefficients of the best alternative.
    pub base: Vec<f64>,
    pub k: usize,
    pub design: DesignMatrix,
    pub distribution: CovariateDistribution,
    pub space: CovariateSpace,
    pub noise: Noise,
    pub n_configs: usize,
    pub replications: usize,
    pub test_points: usize,
    pub master_seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LfcComparison {
    pub beta: Vec<Vec<f64>>,
    pub pcs: PcsEstimate,
    /// GSC estimate minus this configuration's.
    pub difference: f64,
    /// Standard error of the paired difference.
    pub se: f64,
}

impl LfcComparison {
    /// The GSC does not beat this configuration by more than `z` standard errors.
    pub fn consistent(&self, z: f64) -> bool {
        self.difference <= z * self.se
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LfcReport {
    pub gsc: PcsEstimate,
    pub comparisons: Vec<LfcComparison>,
}

/// Lower each inferior alternative further below the best: every intercept
/// drops by up to `δ` more (the first by at least `δ/10`), and when every
/// covariate is non-negative each slope drops by up to `δ` as well. Every gap
/// therefore stays at least `δ` everywhere on the space.
pub fn perturb_gsc<R: Rng + ?Sized>(
    gsc: &[Vec<f64>],
    delta: f64,
    space: &CovariateSpace,
    rng: &mut R,
) -> Vec<Vec<f64>> {
    let nonneg = space.dims().iter().all(|d| d.bounds().0 >= 0.0);
    let mut out = gsc.to_vec();
    for (i, b) in out.iter_mut().enumerate().skip(1) {
        let floor = if i == 1 { 0.1 * delta } else { 0.0 };
        b[0] -= floor + (delta - floor) * rng.random::<f64>();
        if nonneg {
            for v in b.iter_mut().skip(1) {
                *v -= delta * rng.random::<f64>();
            }
        }
    }
    out
}

/// Estimate `PCS_E` under the GSC and under `n_configs` perturbations, all
/// arms sharing every random number stream.
pub fn lfc_stress_test(setup: &LfcSetup) -> Result<LfcReport> {
    if setup.n_configs == 0 {
        return Err(invalid("at least one perturbed configuration is required"));
    }
    let d = setup.design.d();
    let gsc = make_gsc(setup.k, d, setup.config.delta, &setup.base)?;
    let plan = ExperimentPlan {
        mode: setup.mode,
        config: setup.config,
        replications: setup.replications,
        test_points: setup.test_points,
        master_seed: setup.master_seed,
    };
    let arm = |beta: Vec<Vec<f64>>| -> Result<Vec<f64>> {
        let p = LinearProblem::new(
            beta,
            setup.noise.clone(),
            setup.distribution.clone(),
            setup.space.clone(),
            setup.design.clone(),
        )?;
        let oracle = linear_oracle(&p);
        let exp = Experiment {
            space: None,
            ..Experiment::linear(&oracle, &p)
        };
        let rep = run_experiment(&plan, exp)?;
        Ok(rep.records.iter().map(|r| r.good_fraction).collect())
    };

    let base = arm(gsc.clone())?;
    let mut rng: SimRng = Substreams::new(setup.master_seed, u64::MAX).stream(0, 0, Stage::Covariates);
    let mut comparisons = Vec::with_capacity(setup.n_configs);
    for _ in 0..setup.n_configs {
        let beta = perturb_gsc(&gsc, setup.config.delta, &setup.space, &mut rng);
        let props = arm(beta.clone())?;
        let diffs: Vec<f64> = base.iter().zip(&props).map(|(a, b)| a - b).collect();
        let paired = PcsEstimate::from_replications(&diffs, setup.test_points);
        comparisons.push(LfcComparison {
            beta,
            pcs: PcsEstimate::from_replications(&props, setup.test_points),
            difference: paired.value,
            se: paired.se,
        });
    }
    Ok(LfcReport {
        gsc: PcsEstimate::from_replications(&base, setup.test_points),
        comparisons,
    })
}
