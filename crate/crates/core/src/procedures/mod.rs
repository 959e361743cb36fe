//! The two-stage procedures FDHom and FDHet.
//!
//! Both sample every alternative `n₀` times at every design point, estimate
//! variances, top up to a per-alternative (hom) or per-cell (het) total, and
//! return least-squares coefficients as a decision rule.

mod streams;

use serde::{Deserialize, Serialize};

pub use streams::{SimRng, Stage, Substreams};

use crate::constants::{PcsForm, VarianceMode};
use crate::design::DesignMatrix;
use crate::error::{invalid, Error, Result};

/// Source of noisy observations `Y_i(x)`.
///
/// Implementations must be pure functions of their arguments and the RNG so
/// that independent streams give independent samples.
pub trait SimulationOracle: Send + Sync {
    fn k(&self) -> usize;
    /// One observation of alternative `alternative` (0-based) at augmented covariate `x`.
    fn sample(&self, alternative: usize, x: &[f64], rng: &mut SimRng) -> f64;
    fn describe(&self) -> String;

    /// Summary of `n` independent observations. The procedures only use
    /// these statistics, so an oracle that can draw them directly (exactly in
    /// distribution) may override this to skip the per-sample loop.
    fn sample_stats(&self, alternative: usize, x: &[f64], n: usize, rng: &mut SimRng) -> CellStats {
        let mut stats = CellStats::default();
        for _ in 0..n {
            stats.push(self.sample(alternative, x, rng));
        }
        stats
    }
}

/// Count, mean and sum of squared deviations of a batch of observations.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct CellStats {
    pub n: usize,
    pub mean: f64,
    pub ss: f64,
}

impl CellStats {
    pub fn from_samples(samples: &[f64]) -> Self {
        let mut s = Self::default();
        samples.iter().for_each(|&y| s.push(y));
        s
    }

    /// Welford update.
    pub fn push(&mut self, y: f64) {
        self.n += 1;
        let d = y - self.mean;
        self.mean += d / self.n as f64;
        self.ss += d * (y - self.mean);
    }

    /// Pool two independent batches.
    pub fn merge(self, other: Self) -> Self {
        if self.n == 0 {
            return other;
        }
        if other.n == 0 {
            return self;
        }
        let n = self.n + other.n;
        let d = other.mean - self.mean;
        Self {
            n,
            mean: self.mean + d * other.n as f64 / n as f64,
            ss: self.ss + other.ss + d * d * (self.n as f64 * other.n as f64) / n as f64,
        }
    }

    /// Unbiased sample variance.
    pub fn variance(&self) -> Result<f64> {
        if self.n < 2 {
            return Err(Error::InsufficientSamples(self.n));
        }
        Ok(self.ss / (self.n - 1) as f64)
    }

    fn is_finite(&self) -> bool {
        self.mean.is_finite() && self.ss.is_finite()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProcedureConfig {
    pub alpha: f64,
    pub delta: f64,
    pub n0: usize,
    pub form: PcsForm,
    /// The variance mode `h` was solved under.
    pub mode: VarianceMode,
    pub h: f64,
}

impl ProcedureConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.delta > 0.0 && self.delta.is_finite()) {
            return Err(invalid(format!("delta must be positive, got {}", self.delta)));
        }
        if self.n0 < 2 {
            return Err(invalid(format!("n0 must be at least 2, got {}", self.n0)));
        }
        if !(self.h > 0.0 && self.h.is_finite()) {
            return Err(invalid(format!("h must be positive, got {}", self.h)));
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(invalid(format!("alpha must lie in (0, 1), got {}", self.alpha)));
        }
        Ok(())
    }
}

/// Estimated coefficients for each alternative.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecisionRule {
    betas: Vec<Vec<f64>>,
}

impl DecisionRule {
    pub fn new(betas: Vec<Vec<f64>>) -> Result<Self> {
        let Some(first) = betas.first() else {
            return Err(invalid("decision rule needs at least one alternative"));
        };
        let p = first.len();
        if let Some(bad) = betas.iter().find(|b| b.len() != p) {
            return Err(Error::DimensionMismatch {
                expected: p,
                actual: bad.len(),
            });
        }
        Ok(Self { betas })
    }

    pub fn betas(&self) -> &[Vec<f64>] {
        &self.betas
    }

    pub fn k(&self) -> usize {
        self.betas.len()
    }

    /// Estimated mean of every alternative at `x`.
    pub fn predict(&self, x: &[f64]) -> Vec<f64> {
        self.betas.iter().map(|b| dot(b, x)).collect()
    }

    /// Selected alternative at `x`, smallest index on ties.
    pub fn select(&self, x: &[f64]) -> Result<usize> {
        let p = self.betas[0].len();
        if x.len() != p {
            return Err(Error::DimensionMismatch {
                expected: p,
                actual: x.len(),
            });
        }
        Ok(argmax_first(self.betas.iter().map(|b| dot(b, x))))
    }
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Index of the first maximum.
pub(crate) fn argmax_first(values: impl Iterator<Item = f64>) -> usize {
    let mut best = 0;
    let mut best_v = f64::NEG_INFINITY;
    for (i, v) in values.enumerate() {
        if v > best_v {
            best = i;
            best_v = v;
        }
    }
    best
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StageSizes {
    /// `N_i`, replicates per design point for alternative `i`.
    PerAlternative(Vec<usize>),
    /// `N_ij`, indexed `[i][j]`.
    PerCell(Vec<Vec<usize>>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BudgetReport {
    pub sizes: StageSizes,
    pub first_stage: usize,
    pub total: usize,
}

/// `(1/n)(XᵀX)⁻¹Xᵀ Σ_ℓ Y_ℓ` for `n` replicate response vectors over the design points.
pub fn pooled_ls_estimate(samples: &[Vec<f64>], design: &DesignMatrix) -> Result<Vec<f64>> {
    if samples.is_empty() {
        return Err(Error::InsufficientSamples(0));
    }
    let m = design.m();
    let mut mean = vec![0.0; m];
    for y in samples {
        if y.len() != m {
            return Err(Error::DimensionMismatch {
                expected: m,
                actual: y.len(),
            });
        }
        for (acc, v) in mean.iter_mut().zip(y) {
            *acc += v;
        }
    }
    let n = samples.len() as f64;
    mean.iter_mut().for_each(|v| *v /= n);
    design.project(&mean)
}

/// `Σ_ℓ ‖Y_ℓ − Xβ̂‖² / (n·m − d − 1)`.
pub fn pooled_variance(samples: &[Vec<f64>], beta: &[f64], design: &DesignMatrix) -> Result<f64> {
    let m = design.m();
    if beta.len() != design.d() + 1 {
        return Err(Error::DimensionMismatch {
            expected: design.d() + 1,
            actual: beta.len(),
        });
    }
    let dof = (samples.len() * m) as i64 - design.d() as i64 - 1;
    if dof < 1 {
        return Err(Error::InsufficientSamples(samples.len()));
    }
    let fitted: Vec<f64> = design.rows().iter().map(|x| dot(x, beta)).collect();
    let mut ss = 0.0;
    for y in samples {
        if y.len() != m {
            return Err(Error::DimensionMismatch {
                expected: m,
                actual: y.len(),
            });
        }
        ss += y.iter().zip(&fitted).map(|(a, b)| (a - b) * (a - b)).sum::<f64>();
    }
    Ok(ss / dof as f64)
}

/// Total sample size `max{⌈h²S²/δ²⌉, n₀}`.
pub fn stage2_size(h: f64, s2: f64, delta: f64, n0: usize) -> usize {
    let raw = (h * h * s2 / (delta * delta)).ceil();
    if raw.is_finite() && raw > n0 as f64 {
        raw as usize
    } else {
        n0
    }
}

/// Sample mean and unbiased sample variance.
pub fn pointwise_stats(samples: &[f64]) -> Result<(f64, f64)> {
    let stats = CellStats::from_samples(samples);
    Ok((stats.mean, stats.variance()?))
}

fn check_run(oracle: &dyn SimulationOracle, config: &ProcedureConfig, mode: VarianceMode) -> Result<()> {
    config.validate()?;
    if config.mode != mode {
        return Err(Error::ConfigMismatch(format!(
            "h was solved for {} variances but the {} procedure was requested",
            config.mode, mode
        )));
    }
    if oracle.k() < 1 {
        return Err(invalid("oracle has no alternatives"));
    }
    Ok(())
}

fn draw(
    oracle: &dyn SimulationOracle,
    i: usize,
    j: usize,
    x: &[f64],
    n: usize,
    rng: &mut SimRng,
) -> Result<CellStats> {
    let stats = oracle.sample_stats(i, x, n, rng);
    if stats.n != n || !stats.is_finite() {
        return Err(Error::OracleFailure {
            alternative: i,
            point: j,
        });
    }
    Ok(stats)
}

/// Pooled variance from per-design-point first-stage statistics:
/// within-cell deviations plus the lack of fit of the regression.
fn pooled_variance_from_stats(cells: &[CellStats], beta: &[f64], design: &DesignMatrix) -> Result<f64> {
    let n0 = cells[0].n;
    let dof = (n0 * design.m()) as i64 - design.d() as i64 - 1;
    if dof < 1 {
        return Err(Error::InsufficientSamples(n0));
    }
    let ss: f64 = cells
        .iter()
        .zip(design.rows())
        .map(|(c, x)| {
            let r = c.mean - dot(x, beta);
            c.ss + c.n as f64 * r * r
        })
        .sum();
    Ok(ss / dof as f64)
}

/// Procedure FDHom: one pooled variance per alternative.
pub fn run_fdhom(
    oracle: &dyn SimulationOracle,
    design: &DesignMatrix,
    config: &ProcedureConfig,
    streams: &Substreams,
) -> Result<(DecisionRule, BudgetReport)> {
    check_run(oracle, config, VarianceMode::Hom)?;
    let (k, m, n0) = (oracle.k(), design.m(), config.n0);
    let mut betas = Vec::with_capacity(k);
    let mut sizes = Vec::with_capacity(k);
    for i in 0..k {
        let first = design
            .rows()
            .iter()
            .enumerate()
            .map(|(j, x)| draw(oracle, i, j, x, n0, &mut streams.stream(i, j, Stage::First)))
            .collect::<Result<Vec<_>>>()?;
        let means: Vec<f64> = first.iter().map(|c| c.mean).collect();
        let beta0 = design.project(&means)?;
        let s2 = pooled_variance_from_stats(&first, &beta0, design)?;
        let n = stage2_size(config.h, s2, config.delta, n0);
        let mut means = Vec::with_capacity(m);
        for (j, (x, cell)) in design.rows().iter().zip(&first).enumerate() {
            let second = draw(oracle, i, j, x, n - n0, &mut streams.stream(i, j, Stage::Second))?;
            means.push(cell.merge(second).mean);
        }
        betas.push(design.project(&means)?);
        sizes.push(n);
    }
    let total = m * sizes.iter().sum::<usize>();
    Ok((
        DecisionRule::new(betas)?,
        BudgetReport {
            sizes: StageSizes::PerAlternative(sizes),
            first_stage: k * m * n0,
            total,
        },
    ))
}

/// Procedure FDHet: a separate variance and sample size for every
/// (alternative, design point) cell.
pub fn run_fdhet(
    oracle: &dyn SimulationOracle,
    design: &DesignMatrix,
    config: &ProcedureConfig,
    streams: &Substreams,
) -> Result<(DecisionRule, BudgetReport)> {
    check_run(oracle, config, VarianceMode::Het)?;
    let (k, m, n0) = (oracle.k(), design.m(), config.n0);
    let mut betas = Vec::with_capacity(k);
    let mut sizes = Vec::with_capacity(k);
    for i in 0..k {
        let mut means = Vec::with_capacity(m);
        let mut row = Vec::with_capacity(m);
        for (j, x) in design.rows().iter().enumerate() {
            let first = draw(oracle, i, j, x, n0, &mut streams.stream(i, j, Stage::First))?;
            let n = stage2_size(config.h, first.variance()?, config.delta, n0);
            let second = draw(oracle, i, j, x, n - n0, &mut streams.stream(i, j, Stage::Second))?;
            means.push(first.merge(second).mean);
            row.push(n);
        }
        betas.push(design.project(&means)?);
        sizes.push(row);
    }
    let total = sizes.iter().flatten().sum();
    Ok((
        DecisionRule::new(betas)?,
        BudgetReport {
            sizes: StageSizes::PerCell(sizes),
            first_stage: k * m * n0,
            total,
        },
    ))
}

/// Dispatch on the variance mode.
pub fn run_procedure(
    mode: VarianceMode,
    oracle: &dyn SimulationOracle,
    design: &DesignMatrix,
    config: &ProcedureConfig,
    streams: &Substreams,
) -> Result<(DecisionRule, BudgetReport)> {
    match mode {
        VarianceMode::Hom => run_fdhom(oracle, design, config, streams),
        VarianceMode::Het => run_fdhet(oracle, design, config, streams),
    }
}
