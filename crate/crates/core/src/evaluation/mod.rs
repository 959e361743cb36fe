//! Monte Carlo evaluation of selection procedures.
//!
//! Each macro-replication runs a procedure on its own substreams, then scores
//! the resulting decision rule on freshly drawn test covariates (for `PCS_E`)
//! and at the worst-case point `x₀` (for `PCS_min`).

mod case_study;
mod lfc;
mod report;
mod stats;

pub use case_study::{compare_with_constant_rules, CaseStudyReport, ConstantRule};
pub use lfc::{lfc_stress_test, perturb_gsc, LfcComparison, LfcReport, LfcSetup};
pub use report::{format_table, to_csv, Reference, TableRow};
pub use stats::{kolmogorov_survival, ks_normal, stein_statistics, KsResult};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::constants::VarianceMode;
use crate::design::{max_quadratic, CovariateDistribution, CovariateSpace, DesignMatrix};
use crate::error::{invalid, Result};
use crate::problems::{CaseStudy, LinearProblem};
use crate::procedures::{
    argmax_first, run_procedure, DecisionRule, ProcedureConfig, SimRng, SimulationOracle, Stage, Substreams,
};

/// Known mean surfaces used to score decision rules.
pub trait TruthModel: Send + Sync {
    fn k(&self) -> usize;

    /// `𝒴_i(x)` for every alternative at augmented `x`.
    fn means(&self, x: &[f64]) -> Vec<f64>;

    fn distribution(&self) -> &CovariateDistribution;

    /// `max_i 𝒴_i(x) − 𝒴_selected(x)`.
    fn gap(&self, x: &[f64], selected: usize) -> f64 {
        let m = self.means(x);
        m[argmax_first(m.iter().copied())] - m[selected]
    }
}

impl TruthModel for LinearProblem {
    fn k(&self) -> usize {
        LinearProblem::k(self)
    }

    fn means(&self, x: &[f64]) -> Vec<f64> {
        LinearProblem::means(self, x)
    }

    fn distribution(&self) -> &CovariateDistribution {
        LinearProblem::distribution(self)
    }

    fn gap(&self, x: &[f64], selected: usize) -> f64 {
        LinearProblem::gap(self, x, selected)
    }
}

impl TruthModel for CaseStudy {
    fn k(&self) -> usize {
        self.truth.k()
    }

    fn means(&self, x: &[f64]) -> Vec<f64> {
        self.truth.means(x)
    }

    fn distribution(&self) -> &CovariateDistribution {
        &self.distribution
    }
}

/// Good selection: within `δ` of the best, strictly.
pub fn is_good_selection(truth: &dyn TruthModel, x: &[f64], selected: usize, delta: f64) -> bool {
    truth.gap(x, selected) < delta
}

/// A proportion and its Monte Carlo standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PcsEstimate {
    pub value: f64,
    pub se: f64,
}

impl PcsEstimate {
    /// Mean and standard error of per-replication proportions, falling back
    /// to the binomial error over `trials` draws when there is one replication.
    pub fn from_replications(props: &[f64], trials: usize) -> Self {
        let r = props.len() as f64;
        let value = props.iter().sum::<f64>() / r;
        let se = if props.len() > 1 {
            let var = props.iter().map(|p| (p - value).powi(2)).sum::<f64>() / (r - 1.0);
            (var / r).sqrt()
        } else {
            (value * (1.0 - value) / (trials as f64 * r)).sqrt()
        };
        Self { value, se }
    }
}

/// Test covariates for replication `r`, identical across every arm that shares the seed.
pub fn test_covariates(dist: &CovariateDistribution, master_seed: u64, replication: usize, t: usize) -> Vec<Vec<f64>> {
    let mut rng: SimRng = Substreams::new(master_seed, replication as u64).stream(0, 0, Stage::Covariates);
    (0..t).map(|_| dist.sample(&mut rng)).collect()
}

/// Fraction of `points` at which `rule` selects well.
pub fn good_fraction(rule: &DecisionRule, truth: &dyn TruthModel, points: &[Vec<f64>], delta: f64) -> Result<f64> {
    let mut good = 0usize;
    for x in points {
        if is_good_selection(truth, x, rule.select(x)?, delta) {
            good += 1;
        }
    }
    Ok(good as f64 / points.len() as f64)
}

/// `(1/R) Σ_r (1/T) Σ_t 𝟙{good selection by rule r at x_t}`, with a fresh
/// covariate sample per rule.
pub fn estimate_pcs_e(
    rules: &[DecisionRule],
    truth: &dyn TruthModel,
    delta: f64,
    t: usize,
    master_seed: u64,
) -> Result<PcsEstimate> {
    if rules.is_empty() || t == 0 {
        return Err(invalid("need at least one rule and one test covariate"));
    }
    let props = rules
        .par_iter()
        .enumerate()
        .map(|(r, rule)| {
            let xs = test_covariates(truth.distribution(), master_seed, r, t);
            good_fraction(rule, truth, &xs, delta)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(PcsEstimate::from_replications(&props, t))
}

/// Fraction of rules selecting well at `x0`.
pub fn estimate_pcs_min(rules: &[DecisionRule], truth: &dyn TruthModel, x0: &[f64], delta: f64) -> Result<PcsEstimate> {
    if rules.is_empty() {
        return Err(invalid("need at least one rule"));
    }
    let hits = rules
        .iter()
        .map(|rule| Ok(f64::from(u8::from(is_good_selection(truth, x0, rule.select(x0)?, delta)))))
        .collect::<Result<Vec<_>>>()?;
    let value = hits.iter().sum::<f64>() / hits.len() as f64;
    Ok(PcsEstimate {
        value,
        se: (value * (1.0 - value) / hits.len() as f64).sqrt(),
    })
}

/// What to run and how often.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentPlan {
    pub mode: VarianceMode,
    pub config: ProcedureConfig,
    pub replications: usize,
    pub test_points: usize,
    pub master_seed: u64,
}

impl ExperimentPlan {
    pub fn validate(&self) -> Result<()> {
        if self.replications == 0 {
            return Err(invalid("at least one macro-replication is required"));
        }
        if self.test_points == 0 {
            return Err(invalid("at least one test covariate per replication is required"));
        }
        self.config.validate()
    }
}

/// The problem side of an experiment.
#[derive(Clone, Copy)]
pub struct Experiment<'a> {
    pub oracle: &'a dyn SimulationOracle,
    pub truth: &'a dyn TruthModel,
    pub design: &'a DesignMatrix,
    /// Needed for `PCS_min`; without it only `PCS_E` is estimated.
    pub space: Option<&'a CovariateSpace>,
}

impl<'a> Experiment<'a> {
    pub fn linear(oracle: &'a dyn SimulationOracle, problem: &'a LinearProblem) -> Self {
        Self {
            oracle,
            truth: problem,
            design: problem.design(),
            space: Some(problem.space()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplicationRecord {
    pub replication: usize,
    pub total_samples: usize,
    /// Fraction of this replication's test covariates with a good selection.
    pub good_fraction: f64,
    pub good_at_x0: Option<bool>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub h: f64,
    pub mean_total_samples: f64,
    pub pcs_e: PcsEstimate,
    pub pcs_min: Option<PcsEstimate>,
    pub x0: Option<Vec<f64>>,
    pub records: Vec<ReplicationRecord>,
}

/// Run `R` independent macro-replications. Results depend only on the plan,
/// never on the number of worker threads.
pub fn run_experiment(plan: &ExperimentPlan, exp: Experiment<'_>) -> Result<ExperimentReport> {
    plan.validate()?;
    if exp.oracle.k() != exp.truth.k() {
        return Err(invalid(format!(
            "oracle has {} alternatives but the truth model has {}",
            exp.oracle.k(),
            exp.truth.k()
        )));
    }
    let x0 = exp.space.map(|s| max_quadratic(s, exp.design)).transpose()?.map(|(x, _)| x);
    let delta = plan.config.delta;
    let records = (0..plan.replications)
        .into_par_iter()
        .map(|r| {
            let streams = Substreams::new(plan.master_seed, r as u64);
            let (rule, budget) = run_procedure(plan.mode, exp.oracle, exp.design, &plan.config, &streams)?;
            let xs = test_covariates(exp.truth.distribution(), plan.master_seed, r, plan.test_points);
            let good_at_x0 = match &x0 {
                Some(x) => Some(is_good_selection(exp.truth, x, rule.select(x)?, delta)),
                None => None,
            };
            Ok(ReplicationRecord {
                replication: r,
                total_samples: budget.total,
                good_fraction: good_fraction(&rule, exp.truth, &xs, delta)?,
                good_at_x0,
            })
        })
        .collect::<Result<Vec<_>>>()?;

    let r = records.len() as f64;
    let mean_total_samples = records.iter().map(|rec| rec.total_samples as f64).sum::<f64>() / r;
    let props: Vec<f64> = records.iter().map(|rec| rec.good_fraction).collect();
    let pcs_e = PcsEstimate::from_replications(&props, plan.test_points);
    let pcs_min = x0.as_ref().map(|_| {
        let value = records.iter().filter(|rec| rec.good_at_x0 == Some(true)).count() as f64 / r;
        PcsEstimate {
            value,
            se: (value * (1.0 - value) / r).sqrt(),
        }
    });
    Ok(ExperimentReport {
        h: plan.config.h,
        mean_total_samples,
        pcs_e,
        pcs_min,
        x0,
        records,
    })
}

/// Decision rules from `R` replications, for use with the estimators directly.
pub fn collect_rules(
    plan: &ExperimentPlan,
    oracle: &dyn SimulationOracle,
    design: &DesignMatrix,
) -> Result<Vec<DecisionRule>> {
    plan.validate()?;
    (0..plan.replications)
        .into_par_iter()
        .map(|r| {
            let streams = Substreams::new(plan.master_seed, r as u64);
            run_procedure(plan.mode, oracle, design, &plan.config, &streams).map(|(rule, _)| rule)
        })
        .collect()
}
