use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::design::{CovariateNodes, ExpectationScheme, DEFAULT_QMC_SEED};
use crate::error::{invalid, Result};
use crate::problems::CaseStudy;
use crate::procedures::{argmax_first, DecisionRule};

use super::{is_good_selection, test_covariates, PcsEstimate};

/// A regimen given to every patient regardless of covariates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConstantRule {
    pub index: usize,
    pub name: String,
    pub pcs: PcsEstimate,
    /// `E[𝒴_i(X)]` from the truth surface.
    pub expected_qalys: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CaseStudyReport {
    pub personalized: PcsEstimate,
    /// Best regimen for the average patient, `argmax_i 𝒴_i(E[X])`.
    pub at_mean: ConstantRule,
    /// Best regimen on average, `argmax_i E[𝒴_i(X)]`.
    pub on_average: ConstantRule,
    /// Personalized minus the better constant rule, paired over test covariates.
    pub advantage: PcsEstimate,
    /// Mean QALYs of the selected regimen under the personalized rules.
    pub personalized_qalys: PcsEstimate,
    /// `E[max_i 𝒴_i(X)]`.
    pub oracle_qalys: f64,
    /// Monte Carlo estimate of `E[max_i 𝒴_i(X)] − E[𝒴_{i‡}(X)]` on the test covariates.
    pub jensen_gap: PcsEstimate,
    /// Regimens whose expected QALYs are within `δ` of the best.
    pub near_ties: Vec<usize>,
}

/// Score covariate-dependent rules against the two constant alternatives
/// on shared test covariates.
pub fn compare_with_constant_rules(
    cs: &CaseStudy,
    rules: &[DecisionRule],
    delta: f64,
    t: usize,
    master_seed: u64,
) -> Result<CaseStudyReport> {
    if rules.is_empty() || t == 0 {
        return Err(invalid("need at least one rule and one test covariate"));
    }
    let k = cs.truth.k();
    let names: Vec<String> = cs.model.params().regimens.iter().map(|r| r.name.clone()).collect();
    let mean_point = cs.distribution.mean_point();
    let dagger = argmax_first(cs.truth.means(&mean_point).into_iter());

    let nodes = CovariateNodes::build(
        &cs.distribution,
        &ExpectationScheme::Qmc {
            points: 1 << 14,
            seed: DEFAULT_QMC_SEED,
        },
    )?;
    let per_node: Vec<Vec<f64>> = nodes.points.par_iter().map(|x| cs.truth.means(x)).collect();
    let mut expected = vec![0.0; k];
    let mut oracle_qalys = 0.0;
    for (m, w) in per_node.iter().zip(&nodes.weights) {
        for i in 0..k {
            expected[i] += w * m[i];
        }
        oracle_qalys += w * m[argmax_first(m.iter().copied())];
    }
    let ddagger = argmax_first(expected.iter().copied());
    let best = expected[ddagger];
    let near_ties = (0..k).filter(|&i| best - expected[i] < delta).collect();

    struct Rep {
        personalized: f64,
        at_mean: f64,
        on_average: f64,
        qalys: f64,
        jensen: f64,
    }
    let reps = rules
        .par_iter()
        .enumerate()
        .map(|(r, rule)| {
            let xs = test_covariates(&cs.distribution, master_seed, r, t);
            let mut rep = Rep {
                personalized: 0.0,
                at_mean: 0.0,
                on_average: 0.0,
                qalys: 0.0,
                jensen: 0.0,
            };
            for x in &xs {
                let m = cs.truth.means(x);
                let top = m[argmax_first(m.iter().copied())];
                let sel = rule.select(x)?;
                let good = |i: usize| f64::from(u8::from(is_good_selection(cs, x, i, delta)));
                rep.personalized += good(sel);
                rep.at_mean += good(dagger);
                rep.on_average += good(ddagger);
                rep.qalys += m[sel];
                rep.jensen += top - m[ddagger];
            }
            let n = xs.len() as f64;
            Ok(Rep {
                personalized: rep.personalized / n,
                at_mean: rep.at_mean / n,
                on_average: rep.on_average / n,
                qalys: rep.qalys / n,
                jensen: rep.jensen / n,
            })
        })
        .collect::<Result<Vec<_>>>()?;

    let est = |f: &dyn Fn(&Rep) -> f64| PcsEstimate::from_replications(&reps.iter().map(f).collect::<Vec<_>>(), t);
    let at_mean = est(&|r| r.at_mean);
    let on_average = est(&|r| r.on_average);
    let better_constant = at_mean.value >= on_average.value;
    Ok(CaseStudyReport {
        personalized: est(&|r| r.personalized),
        advantage: est(&|r| r.personalized - if better_constant { r.at_mean } else { r.on_average }),
        at_mean: ConstantRule {
            index: dagger,
            name: names[dagger].clone(),
            pcs: at_mean,
            expected_qalys: expected[dagger],
        },
        on_average: ConstantRule {
            index: ddagger,
            name: names[ddagger].clone(),
            pcs: on_average,
            expected_qalys: expected[ddagger],
        },
        personalized_qalys: est(&|r| r.qalys),
        oracle_qalys,
        jensen_gap: est(&|r| r.jensen),
        near_ties,
    })
}
