//! A synthetic Markov reward model of Barrett's esophagus (BE) patients.
//!
//! Patients start in BE at age `x₁` and move monthly through low- and
//! high-grade dysplasia towards esophageal adenocarcinoma (EAC), which is
//! first undetected and then detected and treated. Every living state faces
//! Gompertz all-cause mortality; EAC adds excess mortality. Chemoprevention
//! with effect `e ∈ [0, 1]` multiplies each progression probability by
//! `1 − e`. The reward is quality-adjusted life years.
//!
//! All rates are illustrative stand-ins chosen to give plausible magnitudes.

use std::sync::Arc;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::design::{CovariateDistribution, CovariateSpace, DesignMatrix, Dimension, Marginal};
use crate::error::{invalid, Error, Result};
use crate::numerics::{find_root, RootBracket};
use crate::procedures::{SimRng, SimulationOracle};

pub const STATES: [&str; 6] = ["BE", "LGD", "HGD", "EAC (undetected)", "EAC (detected)", "death"];
pub const BE: usize = 0;
pub const LGD: usize = 1;
pub const HGD: usize = 2;
pub const EAC_UNDETECTED: usize = 3;
pub const EAC_DETECTED: usize = 4;
pub const DEATH: usize = 5;
const LIVING: usize = 5;

/// Covariate positions (0-based, without the intercept).
pub const AGE: usize = 0;
pub const PROGRESSION: usize = 1;
pub const ASPIRIN_EFFECT: usize = 2;
pub const STATIN_EFFECT: usize = 3;

/// Mean of the starting-age distribution.
pub const AGE_MEAN: f64 = 64.78;

/// Source of a regimen's chemoprevention effect.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum DrugEffect {
    /// Read from the given covariate (0-based, without the intercept).
    Covariate(usize),
    Fixed(f64),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Regimen {
    pub name: String,
    pub effect: DrugEffect,
    /// Multiplier on every QALY weight while on the regimen.
    pub utility: f64,
}

/// Model parameters, loadable from TOML.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MarkovParams {
    pub lgd_to_hgd_annual: f64,
    pub hgd_to_eac_annual: f64,
    pub lgd_regression_annual: f64,
    /// HGD found at surveillance and treated, returning the patient to BE.
    pub hgd_treatment_monthly: f64,
    pub eac_detection_monthly: f64,
    pub undetected_eac_mortality_monthly: f64,
    pub detected_eac_mortality_monthly: f64,
    /// QALY weight per month for BE, LGD, HGD, undetected EAC, detected EAC.
    pub qaly_weights: [f64; LIVING],
    /// Annual all-cause hazard `a·exp(b·age)`.
    pub gompertz_a: f64,
    pub gompertz_b: f64,
    /// Death is certain from this age on.
    pub max_age: f64,
    pub regimens: Vec<Regimen>,
}

impl Default for MarkovParams {
    fn default() -> Self {
        Self {
            lgd_to_hgd_annual: 0.08,
            hgd_to_eac_annual: 0.12,
            lgd_regression_annual: 0.05,
            hgd_treatment_monthly: 0.04,
            eac_detection_monthly: 0.04,
            undetected_eac_mortality_monthly: 0.02,
            detected_eac_mortality_monthly: 0.01,
            qaly_weights: [1.0, 1.0, 0.9, 0.8, 0.6],
            gompertz_a: 6.4e-5,
            gompertz_b: 0.085,
            max_age: 110.0,
            regimens: vec![
                Regimen {
                    name: "surveillance".into(),
                    effect: DrugEffect::Fixed(0.0),
                    utility: 1.0,
                },
                Regimen {
                    name: "aspirin".into(),
                    effect: DrugEffect::Covariate(ASPIRIN_EFFECT),
                    utility: 0.995,
                },
                Regimen {
                    name: "statin".into(),
                    effect: DrugEffect::Covariate(STATIN_EFFECT),
                    utility: 0.995,
                },
            ],
        }
    }
}

impl MarkovParams {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let params: Self = toml::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
        params.validate()?;
        Ok(params)
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Parse(e.to_string()))
    }

    /// Every drug effect set to zero.
    pub fn without_drug_effects(mut self) -> Self {
        for r in &mut self.regimens {
            r.effect = DrugEffect::Fixed(0.0);
        }
        self
    }

    pub fn validate(&self) -> Result<()> {
        let prob = |name: &str, v: f64| {
            if (0.0..=1.0).contains(&v) {
                Ok(())
            } else {
                Err(invalid(format!("{name} must be a probability, got {v}")))
            }
        };
        prob("lgd_to_hgd_annual", self.lgd_to_hgd_annual)?;
        prob("hgd_to_eac_annual", self.hgd_to_eac_annual)?;
        prob("lgd_regression_annual", self.lgd_regression_annual)?;
        prob("hgd_treatment_monthly", self.hgd_treatment_monthly)?;
        prob("eac_detection_monthly", self.eac_detection_monthly)?;
        prob("undetected_eac_mortality_monthly", self.undetected_eac_mortality_monthly)?;
        prob("detected_eac_mortality_monthly", self.detected_eac_mortality_monthly)?;
        for w in self.qaly_weights {
            prob("QALY weight", w)?;
        }
        if monthly(self.lgd_to_hgd_annual) + monthly(self.lgd_regression_annual) > 1.0
            || monthly(self.hgd_to_eac_annual) + self.hgd_treatment_monthly > 1.0
        {
            return Err(invalid("exit probabilities from a dysplasia state exceed 1"));
        }
        if !(self.gompertz_a >= 0.0 && self.gompertz_b.is_finite() && self.gompertz_a.is_finite()) {
            return Err(invalid("Gompertz parameters must be finite with a ≥ 0"));
        }
        if !(self.max_age > 0.0 && self.max_age <= 150.0) {
            return Err(invalid(format!("max_age must lie in (0, 150], got {}", self.max_age)));
        }
        if self.regimens.is_empty() {
            return Err(invalid("at least one regimen is required"));
        }
        for r in &self.regimens {
            prob("regimen utility", r.utility)?;
            match r.effect {
                DrugEffect::Fixed(e) => prob("drug effect", e)?,
                DrugEffect::Covariate(c) if c > STATIN_EFFECT => {
                    return Err(invalid(format!("regimen '{}' reads unknown covariate {c}", r.name)))
                }
                DrugEffect::Covariate(_) => {}
            }
        }
        Ok(())
    }
}

/// Annual probability converted to a constant monthly probability.
pub fn monthly(annual: f64) -> f64 {
    1.0 - (1.0 - annual).powf(1.0 / 12.0)
}

/// Per-(regimen, covariate) transition structure, excluding age effects.
#[derive(Debug, Clone, Copy)]
struct Kernel {
    /// Next-state probabilities among living states, given survival.
    cond: [[f64; LIVING]; LIVING],
    excess: [f64; LIVING],
    reward: [f64; LIVING],
}

/// Monthly Markov chain over [`STATES`] with QALY rewards.
#[derive(Debug, Clone)]
pub struct MarkovRewardModel {
    params: MarkovParams,
    /// Death probability by month of age.
    mortality: Vec<f64>,
}

impl MarkovRewardModel {
    pub fn new(params: MarkovParams) -> Result<Self> {
        params.validate()?;
        let months = (params.max_age * 12.0).ceil() as usize;
        let mortality = (0..months)
            .map(|mo| {
                let age = mo as f64 / 12.0;
                let hazard = params.gompertz_a * (params.gompertz_b * age).exp();
                1.0 - (-hazard / 12.0).exp()
            })
            .collect();
        Ok(Self { params, mortality })
    }

    pub fn params(&self) -> &MarkovParams {
        &self.params
    }

    pub fn k(&self) -> usize {
        self.params.regimens.len()
    }

    /// Default case-study covariate bounds.
    pub fn space() -> CovariateSpace {
        CovariateSpace::new(vec![
            Dimension::Interval { lo: 55.0, hi: 80.0 },
            Dimension::Interval { lo: 0.0, hi: 0.1 },
            Dimension::Interval { lo: 0.0, hi: 1.0 },
            Dimension::Interval { lo: 0.0, hi: 1.0 },
        ])
        .expect("static bounds")
    }

    fn check(&self, regimen: usize, x: &[f64]) -> Result<()> {
        if regimen >= self.k() {
            return Err(invalid(format!("regimen {regimen} out of range (k = {})", self.k())));
        }
        if x.len() != 5 {
            return Err(Error::DimensionMismatch {
                expected: 5,
                actual: x.len(),
            });
        }
        if !Self::space().contains(x) {
            return Err(Error::InvalidCovariate(format!("{x:?} is outside the model's covariate bounds")));
        }
        Ok(())
    }

    fn kernel(&self, regimen: usize, x: &[f64]) -> Kernel {
        let p = &self.params;
        let r = &p.regimens[regimen];
        let e = match r.effect {
            DrugEffect::Fixed(e) => e,
            DrugEffect::Covariate(c) => x[c + 1],
        };
        let slow = 1.0 - e;
        let be_lgd = monthly(x[PROGRESSION + 1]) * slow;
        let lgd_hgd = monthly(p.lgd_to_hgd_annual) * slow;
        let lgd_be = monthly(p.lgd_regression_annual);
        let hgd_eac = monthly(p.hgd_to_eac_annual) * slow;
        let hgd_be = p.hgd_treatment_monthly;
        let detect = p.eac_detection_monthly;

        let mut cond = [[0.0; LIVING]; LIVING];
        cond[BE][LGD] = be_lgd;
        cond[BE][BE] = 1.0 - be_lgd;
        cond[LGD][HGD] = lgd_hgd;
        cond[LGD][BE] = lgd_be;
        cond[LGD][LGD] = 1.0 - lgd_hgd - lgd_be;
        cond[HGD][EAC_UNDETECTED] = hgd_eac;
        cond[HGD][BE] = hgd_be;
        cond[HGD][HGD] = 1.0 - hgd_eac - hgd_be;
        cond[EAC_UNDETECTED][EAC_DETECTED] = detect;
        cond[EAC_UNDETECTED][EAC_UNDETECTED] = 1.0 - detect;
        cond[EAC_DETECTED][EAC_DETECTED] = 1.0;

        let mut excess = [0.0; LIVING];
        excess[EAC_UNDETECTED] = p.undetected_eac_mortality_monthly;
        excess[EAC_DETECTED] = p.detected_eac_mortality_monthly;
        let reward = p.qaly_weights.map(|w| w * r.utility / 12.0);
        Kernel { cond, excess, reward }
    }

    fn death_prob(&self, kernel: &Kernel, state: usize, month_of_age: usize) -> f64 {
        let base = self.mortality.get(month_of_age).copied().unwrap_or(1.0);
        1.0 - (1.0 - base) * (1.0 - kernel.excess[state])
    }

    fn start_month(x: &[f64]) -> usize {
        (x[AGE + 1] * 12.0).round() as usize
    }

    /// Full transition row (over all six states) from `state` at the given
    /// month of age.
    pub fn transition_row(&self, regimen: usize, x: &[f64], state: usize, month_of_age: usize) -> Result<[f64; 6]> {
        self.check(regimen, x)?;
        let mut row = [0.0; 6];
        if state == DEATH {
            row[DEATH] = 1.0;
            return Ok(row);
        }
        if state > DEATH {
            return Err(invalid(format!("unknown state {state}")));
        }
        let kernel = self.kernel(regimen, x);
        let q = self.death_prob(&kernel, state, month_of_age);
        for t in 0..LIVING {
            row[t] = (1.0 - q) * kernel.cond[state][t];
        }
        row[DEATH] = q;
        Ok(row)
    }

    /// QALYs of one simulated patient starting in BE: each month the patient
    /// transitions, then accrues `weight/12` if still alive.
    pub fn simulate_patient<R: Rng + ?Sized>(&self, regimen: usize, x: &[f64], rng: &mut R) -> Result<f64> {
        self.check(regimen, x)?;
        Ok(self.simulate_unchecked(&self.kernel(regimen, x), Self::start_month(x), rng))
    }

    fn simulate_unchecked<R: Rng + ?Sized>(&self, kernel: &Kernel, start: usize, rng: &mut R) -> f64 {
        let mut state = BE;
        let mut month = start;
        let mut total = 0.0;
        loop {
            let q = self.death_prob(kernel, state, month);
            let u: f64 = rng.random();
            if u < q {
                return total;
            }
            // reuse the uniform for the conditional move
            let mut v = (u - q) / (1.0 - q);
            let row = &kernel.cond[state];
            let mut next = state;
            for (t, &p) in row.iter().enumerate() {
                if p > 0.0 {
                    next = t;
                    if v < p {
                        break;
                    }
                    v -= p;
                }
            }
            state = next;
            total += kernel.reward[state];
            month += 1;
        }
    }

    /// Exact expected QALYs by propagating the state distribution.
    pub fn expected_qalys(&self, regimen: usize, x: &[f64]) -> Result<f64> {
        self.check(regimen, x)?;
        let kernel = self.kernel(regimen, x);
        let mut dist = [0.0; LIVING];
        dist[BE] = 1.0;
        let mut total = 0.0;
        for month in Self::start_month(x)..self.mortality.len() {
            let mut next = [0.0; LIVING];
            for s in 0..LIVING {
                if dist[s] == 0.0 {
                    continue;
                }
                let alive = dist[s] * (1.0 - self.death_prob(&kernel, s, month));
                for t in 0..LIVING {
                    next[t] += alive * kernel.cond[s][t];
                }
            }
            dist = next;
            total += dist.iter().zip(&kernel.reward).map(|(p, r)| p * r).sum::<f64>();
            if dist.iter().sum::<f64>() < 1e-16 {
                break;
            }
        }
        Ok(total)
    }
}

/// Sampling oracle returning one patient's QALYs.
#[derive(Debug, Clone)]
pub struct MarkovOracle {
    model: Arc<MarkovRewardModel>,
}

impl MarkovOracle {
    pub fn new(model: Arc<MarkovRewardModel>) -> Self {
        Self { model }
    }
}

impl SimulationOracle for MarkovOracle {
    fn k(&self) -> usize {
        self.model.k()
    }

    fn sample(&self, alternative: usize, x: &[f64], rng: &mut SimRng) -> f64 {
        self.model.simulate_patient(alternative, x, rng).unwrap_or(f64::NAN)
    }

    fn describe(&self) -> String {
        let names: Vec<&str> = self.model.params.regimens.iter().map(|r| r.name.as_str()).collect();
        format!("synthetic BE Markov model, regimens {names:?}")
    }

    fn sample_stats(&self, alternative: usize, x: &[f64], n: usize, rng: &mut SimRng) -> crate::procedures::CellStats {
        let mut stats = crate::procedures::CellStats::default();
        if self.model.check(alternative, x).is_err() {
            stats.n = n;
            stats.mean = f64::NAN;
            return stats;
        }
        let kernel = self.model.kernel(alternative, x);
        let start = MarkovRewardModel::start_month(x);
        for _ in 0..n {
            stats.push(self.model.simulate_unchecked(&kernel, start, rng));
        }
        stats
    }
}

/// Rectilinear grid with multilinear interpolation (values row-major, last axis fastest).
#[derive(Debug, Clone)]
struct Grid {
    axes: Vec<Vec<f64>>,
    values: Vec<f64>,
}

impl Grid {
    fn interp(&self, point: &[f64]) -> f64 {
        // locate the cell and the weight of its upper corner along each axis
        let mut lower = Vec::with_capacity(self.axes.len());
        let mut frac = Vec::with_capacity(self.axes.len());
        for (axis, &v) in self.axes.iter().zip(point) {
            let n = axis.len();
            if n == 1 {
                lower.push(0);
                frac.push(0.0);
                continue;
            }
            let v = v.clamp(axis[0], axis[n - 1]);
            let i = axis.partition_point(|&a| a <= v).clamp(1, n - 1) - 1;
            lower.push(i);
            frac.push((v - axis[i]) / (axis[i + 1] - axis[i]));
        }
        let dims = self.axes.len();
        let mut total = 0.0;
        for corner in 0..(1usize << dims) {
            let mut w = 1.0;
            let mut idx = 0;
            for a in 0..dims {
                let up = (corner >> a) & 1 == 1;
                let n = self.axes[a].len();
                let i = if up { (lower[a] + 1).min(n - 1) } else { lower[a] };
                w *= if up { frac[a] } else { 1.0 - frac[a] };
                idx = idx * n + i;
            }
            if w != 0.0 {
                total += w * self.values[idx];
            }
        }
        total
    }
}

fn steps(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    (0..=n).map(|i| lo + (hi - lo) * i as f64 / n as f64).collect()
}

/// Exact expected QALYs on a covariate grid, interpolated multilinearly.
#[derive(Debug, Clone)]
pub struct ResponseSurface {
    /// Covariates each regimen's grid is indexed by.
    inputs: Vec<Vec<usize>>,
    grids: Vec<Grid>,
}

impl ResponseSurface {
    /// Grid: integer ages 55..=80, progression rate step 0.01, drug effects step 0.1.
    pub fn build(model: &MarkovRewardModel) -> Result<Self> {
        let axis_for = |c: usize| match c {
            AGE => steps(55.0, 80.0, 25),
            PROGRESSION => steps(0.0, 0.1, 10),
            _ => steps(0.0, 1.0, 10),
        };
        let mut inputs = Vec::new();
        let mut grids = Vec::new();
        for (r, regimen) in model.params.regimens.iter().enumerate() {
            let mut cov = vec![AGE, PROGRESSION];
            if let DrugEffect::Covariate(c) = regimen.effect {
                cov.push(c);
            }
            let axes: Vec<Vec<f64>> = cov.iter().map(|&c| axis_for(c)).collect();
            let points = crate::design::cartesian(&axes);
            let values = points
                .par_iter()
                .map(|p| {
                    let mut x = vec![1.0, AGE_MEAN, 0.05, 0.5, 0.5];
                    for (&c, &v) in cov.iter().zip(p) {
                        x[c + 1] = v;
                    }
                    model.expected_qalys(r, &x)
                })
                .collect::<Result<Vec<_>>>()?;
            inputs.push(cov);
            grids.push(Grid { axes, values });
        }
        Ok(Self { inputs, grids })
    }

    pub fn k(&self) -> usize {
        self.grids.len()
    }

    /// Interpolated expected QALYs of every regimen at augmented `x`.
    pub fn means(&self, x: &[f64]) -> Vec<f64> {
        self.inputs
            .iter()
            .zip(&self.grids)
            .map(|(cov, g)| {
                let p: Vec<f64> = cov.iter().map(|&c| x[c + 1]).collect();
                g.interp(&p)
            })
            .collect()
    }
}

/// Exponentially tilted pmf on `values` with the requested mean.
pub fn tilted_pmf(values: &[f64], mean: f64) -> Result<Vec<f64>> {
    let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !(mean > lo && mean < hi) {
        return Err(invalid(format!("mean {mean} must lie strictly inside [{lo}, {hi}]")));
    }
    let center = 0.5 * (lo + hi);
    let pmf = |theta: f64| -> Vec<f64> {
        let w: Vec<f64> = values.iter().map(|v| (theta * (v - center)).exp()).collect();
        let s: f64 = w.iter().sum();
        w.into_iter().map(|x| x / s).collect()
    };
    let mean_of = |theta: f64| pmf(theta).iter().zip(values).map(|(p, v)| p * v).sum::<f64>() - mean;
    let theta = find_root(mean_of, RootBracket::new(-5.0, 5.0)?, 1e-14)?;
    let mut p = pmf(theta);
    // force an exact unit sum for validation
    let s: f64 = p.iter().sum();
    p.iter_mut().for_each(|x| *x /= s);
    Ok(p)
}

/// Everything needed to run and evaluate the case study.
#[derive(Debug, Clone)]
pub struct CaseStudy {
    pub model: Arc<MarkovRewardModel>,
    pub distribution: CovariateDistribution,
    pub space: CovariateSpace,
    pub design: DesignMatrix,
    pub truth: Arc<ResponseSurface>,
}

impl CaseStudy {
    pub fn oracle(&self) -> MarkovOracle {
        MarkovOracle::new(self.model.clone())
    }
}

/// Starting age, progression rate and the two drug effects.
pub fn case_study_distribution() -> Result<CovariateDistribution> {
    let ages: Vec<f64> = (55..=80).map(f64::from).collect();
    let probs = tilted_pmf(&ages, AGE_MEAN)?;
    CovariateDistribution::new(vec![
        Marginal::Discrete { values: ages, probs },
        Marginal::Uniform { lo: 0.0, hi: 0.1 },
        Marginal::Triangular { lo: 0.0, mode: 0.59, hi: 1.0 },
        Marginal::Triangular { lo: 0.0, mode: 0.62, hi: 1.0 },
    ])
}

/// The 16-point factorial design `{60,70}×{0.1/3,0.2/3}×{1/3,2/3}²`.
pub fn case_study_design() -> Result<DesignMatrix> {
    DesignMatrix::factorial_mixed(&[
        vec![60.0, 70.0],
        vec![0.1 / 3.0, 0.2 / 3.0],
        vec![1.0 / 3.0, 2.0 / 3.0],
        vec![1.0 / 3.0, 2.0 / 3.0],
    ])
}

pub fn case_study_problem(params: MarkovParams) -> Result<CaseStudy> {
    let model = Arc::new(MarkovRewardModel::new(params)?);
    let truth = Arc::new(ResponseSurface::build(&model)?);
    Ok(CaseStudy {
        model,
        distribution: case_study_distribution()?,
        space: MarkovRewardModel::space(),
        design: case_study_design()?,
        truth,
    })
}
