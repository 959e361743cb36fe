//! Declarative run configuration, read from TOML.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use serde::{Deserialize, Serialize};

use covsel::constants::{PcsForm, VarianceMode};
use covsel::design::{CovariateDistribution, CovariateSpace, DesignMatrix, ExpectationScheme};
use covsel::problems::{
    benchmark_problem, case_study_problem, CaseStudy, LinearProblem, LinearProblemSpec, MarkovParams,
    BENCHMARK_ALPHA, BENCHMARK_DELTA, BENCHMARK_N0,
};

pub const DEFAULT_REPLICATIONS: usize = 200;
pub const DEFAULT_TEST_POINTS: usize = 10_000;
pub const DEFAULT_SEED: u64 = 1;

/// Case-study procedure defaults.
pub const CASE_STUDY_DELTA: f64 = 0.2;
pub const CASE_STUDY_N0: usize = 100;

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    /// Macro-replications `R`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub replications: Option<usize>,
    /// Test covariates per replication `T`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub test_points: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<PathBuf>,
    /// Fraction of full-scale `R` and `T` used by `reproduce`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scale: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub procedure: Option<ProcedureSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub problem: Option<ProblemConfig>,
    /// Design points without the intercept; overrides the problem's design.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub design: Option<Vec<Vec<f64>>>,
    /// Overrides the problem's covariate distribution.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub distribution: Option<CovariateDistribution>,
    /// Node scheme for the expectation over covariates when solving `h`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scheme: Option<ExpectationScheme>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProcedureSection {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mode: Option<VarianceMode>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub form: Option<PcsForm>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub delta: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n0: Option<usize>,
    /// Use this `h` instead of solving for it.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub h: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ProblemConfig {
    /// One of the nine built-in linear problems, `0..=8`.
    Builtin { id: usize },
    Linear(LinearProblemSpec),
    Markov {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        params: Option<MarkovParams>,
        /// TOML file with [`MarkovParams`]; relative to the config file.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        params_file: Option<PathBuf>,
    },
}

/// Procedure settings with every default filled in.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Procedure {
    pub mode: VarianceMode,
    pub form: PcsForm,
    pub alpha: f64,
    pub delta: f64,
    pub n0: usize,
    pub h: Option<f64>,
}

pub enum Problem {
    Linear(LinearProblem),
    Markov(Box<CaseStudy>),
}

impl Problem {
    pub fn label(&self) -> String {
        match self {
            Problem::Linear(p) if p.name().is_empty() => "linear".into(),
            Problem::Linear(p) => p.name().to_string(),
            Problem::Markov(_) => "case study".into(),
        }
    }

    pub fn k(&self) -> usize {
        match self {
            Problem::Linear(p) => p.k(),
            Problem::Markov(cs) => cs.model.k(),
        }
    }

    pub fn design(&self) -> &DesignMatrix {
        match self {
            Problem::Linear(p) => p.design(),
            Problem::Markov(cs) => &cs.design,
        }
    }

    pub fn distribution(&self) -> &CovariateDistribution {
        match self {
            Problem::Linear(p) => p.distribution(),
            Problem::Markov(cs) => &cs.distribution,
        }
    }

    pub fn space(&self) -> &CovariateSpace {
        match self {
            Problem::Linear(p) => p.space(),
            Problem::Markov(cs) => &cs.space,
        }
    }
}

impl RunConfig {
    pub fn from_toml_str(text: &str) -> covsel::Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| covsel::Error::Parse(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml_string(&self) -> covsel::Result<String> {
        toml::to_string(self).map_err(|e| covsel::Error::Parse(e.to_string()))
    }

    pub fn load(path: &Path) -> anyhow::Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("cannot read config file {}", path.display()))?;
        Self::from_toml_str(&text).with_context(|| format!("invalid config file {}", path.display()))
    }

    /// Checks that need no problem construction.
    pub fn validate(&self) -> covsel::Result<()> {
        let bad = |m: String| Err(covsel::Error::InvalidArgument(m));
        if self.replications == Some(0) {
            return bad("replications must be at least 1".into());
        }
        if self.test_points == Some(0) {
            return bad("test_points must be at least 1".into());
        }
        if let Some(s) = self.scale {
            if !(s > 0.0 && s <= 1.0) {
                return bad(format!("scale must lie in (0, 1], got {s}"));
            }
        }
        if let Some(ProblemConfig::Markov {
            params: Some(_),
            params_file: Some(_),
        }) = &self.problem
        {
            return bad("give either params or params_file for the Markov problem, not both".into());
        }
        if let Some(p) = &self.procedure {
            if let Some(a) = p.alpha {
                if !(a > 0.0 && a < 1.0) {
                    return bad(format!("alpha must lie in (0, 1), got {a}"));
                }
            }
            if let Some(d) = p.delta {
                if !(d > 0.0 && d.is_finite()) {
                    return bad(format!("delta must be positive, got {d}"));
                }
            }
            if let Some(h) = p.h {
                if !(h > 0.0 && h.is_finite()) {
                    return bad(format!("h must be positive, got {h}"));
                }
            }
        }
        Ok(())
    }

    fn is_markov(&self) -> bool {
        matches!(self.problem, Some(ProblemConfig::Markov { .. }))
    }

    pub fn procedure(&self) -> Procedure {
        let p = self.procedure.clone().unwrap_or_default();
        let markov = self.is_markov();
        Procedure {
            mode: p.mode.unwrap_or(if markov { VarianceMode::Het } else { VarianceMode::Hom }),
            form: p.form.unwrap_or(PcsForm::Expectation),
            alpha: p.alpha.unwrap_or(BENCHMARK_ALPHA),
            delta: p.delta.unwrap_or(if markov { CASE_STUDY_DELTA } else { BENCHMARK_DELTA }),
            n0: p.n0.unwrap_or(if markov { CASE_STUDY_N0 } else { BENCHMARK_N0 }),
            h: p.h,
        }
    }

    pub fn replications(&self) -> usize {
        self.replications.unwrap_or(DEFAULT_REPLICATIONS)
    }

    pub fn test_points(&self) -> usize {
        self.test_points.unwrap_or(DEFAULT_TEST_POINTS)
    }

    /// Build the configured problem, applying design and distribution
    /// overrides. `base_dir` anchors relative parameter files.
    pub fn problem(&self, base_dir: &Path) -> anyhow::Result<Problem> {
        let Some(cfg) = &self.problem else {
            bail!(covsel::Error::InvalidArgument("config has no [problem] section".into()));
        };
        let design = self.design.as_ref().map(|d| DesignMatrix::from_covariates(d)).transpose()?;
        Ok(match cfg {
            ProblemConfig::Builtin { id } => Problem::Linear(self.override_linear(benchmark_problem(*id)?, design)?),
            ProblemConfig::Linear(spec) => Problem::Linear(self.override_linear(spec.clone().try_into()?, design)?),
            ProblemConfig::Markov { params, params_file } => {
                let params = match (params, params_file) {
                    (Some(p), _) => p.clone(),
                    (None, Some(f)) => {
                        let path = base_dir.join(f);
                        let text = std::fs::read_to_string(&path)
                            .with_context(|| format!("cannot read Markov parameter file {}", path.display()))?;
                        MarkovParams::from_toml_str(&text)?
                    }
                    (None, None) => MarkovParams::default(),
                };
                let mut cs = case_study_problem(params)?;
                if let Some(d) = design {
                    for (j, x) in d.rows().iter().enumerate() {
                        if !cs.space.contains(x) {
                            bail!(covsel::Error::InvalidArgument(format!(
                                "design point {j} lies outside the model's covariate bounds"
                            )));
                        }
                    }
                    cs.design = d;
                }
                if let Some(dist) = &self.distribution {
                    dist.check_within(&cs.space)?;
                    cs.distribution = dist.clone();
                }
                Problem::Markov(Box::new(cs))
            }
        })
    }

    fn override_linear(&self, p: LinearProblem, design: Option<DesignMatrix>) -> covsel::Result<LinearProblem> {
        if design.is_none() && self.distribution.is_none() {
            return Ok(p);
        }
        let name = p.name().to_string();
        let space = match &self.distribution {
            Some(d) => d.space(),
            None => p.space().clone(),
        };
        Ok(LinearProblem::new(
            p.beta().to_vec(),
            p.noise().clone(),
            self.distribution.clone().unwrap_or_else(|| p.distribution().clone()),
            space,
            design.unwrap_or_else(|| p.design().clone()),
        )?
        .with_name(name))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const FULL: &str = r#"
seed = 7
replications = 10
test_points = 100
output = "out.csv"
scale = 0.5
design = [[0.0], [1.0]]
scheme = { kind = "tensor", nodes = 12 }

[procedure]
mode = "het"
form = "minimum"
alpha = 0.1
delta = 0.5
n0 = 20

[problem]
kind = "linear"
name = "toy"
beta = [[1.0, 1.0], [0.0, 1.0]]
noise = { kind = "hom", sigma = [1.0, 2.0] }
distribution = [{ kind = "uniform", lo = 0.0, hi = 1.0 }]
design = [[0.0], [0.5]]
"#;

    #[test]
    fn round_trip() {
        let cfg = RunConfig::from_toml_str(FULL).unwrap();
        let again = RunConfig::from_toml_str(&cfg.to_toml_string().unwrap()).unwrap();
        assert_eq!(cfg, again);
        let markov = RunConfig {
            problem: Some(ProblemConfig::Markov {
                params: Some(MarkovParams::default()),
                params_file: None,
            }),
            ..Default::default()
        };
        let again = RunConfig::from_toml_str(&markov.to_toml_string().unwrap()).unwrap();
        assert_eq!(markov, again);
    }

    #[test]
    fn overrides_apply() {
        let cfg = RunConfig::from_toml_str(FULL).unwrap();
        let Problem::Linear(p) = cfg.problem(Path::new(".")).unwrap() else {
            panic!("expected a linear problem")
        };
        assert_eq!(p.design().rows()[1], vec![1.0, 1.0]);
        assert_eq!(cfg.procedure().n0, 20);
    }

    #[test]
    fn unknown_keys_rejected() {
        assert!(RunConfig::from_toml_str("bogus = 1").is_err());
        assert!(RunConfig::from_toml_str("[procedure]\nalfa = 0.1").is_err());
        assert!(RunConfig::from_toml_str("[problem]\nkind = \"builtin\"\nid = 0\nextra = 1").is_err());
        assert!(RunConfig::from_toml_str("scale = 0.0").is_err());
        assert!(RunConfig::from_toml_str("replications = 0").is_err());
    }

    #[test]
    fn defaults_follow_problem_kind() {
        let b = RunConfig::from_toml_str("[problem]\nkind = \"builtin\"\nid = 0").unwrap();
        assert_eq!(b.procedure().delta, 1.0);
        assert_eq!(b.procedure().mode, VarianceMode::Hom);
        let m = RunConfig::from_toml_str("[problem]\nkind = \"markov\"").unwrap();
        assert_eq!(m.procedure().delta, 0.2);
        assert_eq!(m.procedure().n0, 100);
        assert_eq!(m.procedure().mode, VarianceMode::Het);
    }
}
