//! Test problems: linear benchmarks with known means and a Markov case study.

pub mod linear;
pub mod markov;

pub use linear::*;
pub use markov::{
    case_study_design, case_study_distribution, case_study_problem, tilted_pmf, CaseStudy, DrugEffect, MarkovOracle,
    MarkovParams, MarkovRewardModel, Regimen, ResponseSurface,
};
