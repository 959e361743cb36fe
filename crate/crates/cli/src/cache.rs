//! On-disk cache of solved `h` constants, keyed by a hash of every input
//! that affects the solution.

use std::path::{Path, PathBuf};

use serde::Serialize;
use sha2::{Digest, Sha256};

use covsel::constants::{solve_h, HProblem, HSolution, PcsForm, VarianceMode};
use covsel::design::{CovariateDistribution, CovariateSpace, ExpectationScheme};
use covsel::numerics::QuadratureSpec;

/// Bump when the solver changes in a way that alters results.
const CACHE_VERSION: u32 = 1;

#[derive(Serialize)]
struct Key<'a> {
    version: u32,
    mode: VarianceMode,
    form: PcsForm,
    k: usize,
    n0: usize,
    alpha: f64,
    design: &'a [Vec<f64>],
    distribution: Option<&'a CovariateDistribution>,
    space: Option<&'a CovariateSpace>,
    scheme: Option<&'a ExpectationScheme>,
    quad: QuadratureSpec,
}

pub fn cache_key(prob: &HProblem) -> String {
    let expectation = prob.form == PcsForm::Expectation;
    let key = Key {
        version: CACHE_VERSION,
        mode: prob.mode,
        form: prob.form,
        k: prob.k,
        n0: prob.n0,
        alpha: prob.alpha,
        design: prob.design.rows(),
        distribution: prob.distribution.as_ref().filter(|_| expectation),
        space: prob.space.as_ref().filter(|_| !expectation),
        scheme: Some(&prob.scheme).filter(|_| expectation),
        quad: prob.quad,
    };
    let text = toml::to_string(&key).expect("cache key serializes");
    hex::encode(Sha256::digest(text.as_bytes()))
}

#[derive(Debug, Clone)]
pub struct HCache {
    dir: Option<PathBuf>,
}

impl HCache {
    /// `None` disables caching.
    pub fn new(dir: Option<PathBuf>) -> Self {
        Self { dir }
    }

    pub fn default_dir() -> PathBuf {
        std::env::temp_dir().join("covsel-h-cache")
    }

    fn path(dir: &Path, key: &str) -> PathBuf {
        dir.join(format!("h-{key}.toml"))
    }

    /// Cached solution, or solve and store. Unreadable entries are recomputed.
    pub fn solve(&self, prob: &HProblem) -> covsel::Result<HSolution> {
        let Some(dir) = &self.dir else {
            return solve_h(prob);
        };
        let path = Self::path(dir, &cache_key(prob));
        if let Some(sol) = std::fs::read_to_string(&path)
            .ok()
            .and_then(|t| toml::from_str::<HSolution>(&t).ok())
        {
            return Ok(sol);
        }
        let sol = solve_h(prob)?;
        // a failed write only costs a recomputation later
        if std::fs::create_dir_all(dir).is_ok() {
            if let Ok(text) = toml::to_string(&sol) {
                let tmp = path.with_extension(format!("tmp{}", std::process::id()));
                if std::fs::write(&tmp, text).is_ok() {
                    let _ = std::fs::rename(&tmp, &path);
                }
            }
        }
        Ok(sol)
    }
}
