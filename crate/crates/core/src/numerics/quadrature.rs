//! Adaptive Gauss–Kronrod quadrature on finite and semi-infinite intervals,
//! Gauss–Legendre rules, and reusable node sets for densities on `[0, ∞)`.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

/// Kronrod abscissae on [-1, 1] (non-negative half, descending).
#[allow(clippy::excessive_precision)]
const XGK: [f64; 8] = [
    0.991_455_371_120_812_639_206_854_697_526_329,
    0.949_107_912_342_758_524_526_189_684_047_851,
    0.864_864_423_359_769_072_789_712_788_640_926,
    0.741_531_185_599_394_439_863_864_773_280_788,
    0.586_087_235_467_691_130_294_144_838_258_730,
    0.405_845_151_377_397_166_906_606_412_076_961,
    0.207_784_955_007_898_467_600_689_403_773_245,
    0.0,
];

/// Gauss weights for the 7-point rule embedded at XGK[1], XGK[3], XGK[5], XGK[7].
#[allow(clippy::excessive_precision)]
const WG: [f64; 4] = [
    0.129_484_966_168_869_693_270_611_432_679_082,
    0.279_705_391_489_276_667_901_467_771_423_780,
    0.381_830_050_505_118_944_950_369_775_488_975,
    0.417_959_183_673_469_387_755_102_040_816_327,
];

#[allow(clippy::excessive_precision)]
const WGK: [f64; 8] = [
    0.022_935_322_010_529_224_963_732_008_058_970,
    0.063_092_092_629_978_553_290_700_663_189_204,
    0.104_790_010_322_250_183_839_876_322_541_518,
    0.140_653_259_715_525_918_745_189_590_510_238,
    0.169_004_726_639_267_902_826_583_426_598_550,
    0.190_350_578_064_785_409_913_256_402_421_014,
    0.204_432_940_075_298_892_414_161_999_234_649,
    0.209_482_141_084_727_828_012_999_174_891_714,
];

const INITIAL_PIECES: usize = 8;

/// Tolerances for adaptive integration.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuadratureSpec {
    pub abs_tol: f64,
    pub rel_tol: f64,
    pub max_subdivisions: usize,
}

impl Default for QuadratureSpec {
    fn default() -> Self {
        Self {
            abs_tol: 1e-9,
            rel_tol: 1e-8,
            max_subdivisions: 4096,
        }
    }
}

impl QuadratureSpec {
    pub fn new(abs_tol: f64, rel_tol: f64, max_subdivisions: usize) -> Result<Self> {
        let spec = Self {
            abs_tol,
            rel_tol,
            max_subdivisions,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.abs_tol > 0.0 && self.rel_tol > 0.0) {
            return Err(invalid("quadrature tolerances must be positive"));
        }
        if self.max_subdivisions < 1 {
            return Err(invalid("max_subdivisions must be at least 1"));
        }
        Ok(())
    }

    fn tolerance(&self, value: f64) -> f64 {
        self.abs_tol.max(self.rel_tol * value.abs())
    }
}

/// Result of an adaptive integration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Integral {
    pub value: f64,
    pub abs_error: f64,
    pub evaluations: usize,
}

#[derive(Debug, Clone, Copy)]
struct Segment {
    a: f64,
    b: f64,
    value: f64,
    error: f64,
}

impl PartialEq for Segment {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Segment {}

impl PartialOrd for Segment {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Segment {
    // largest error first; position breaks ties so the order is total
    fn cmp(&self, other: &Self) -> Ordering {
        self.error
            .total_cmp(&other.error)
            .then_with(|| other.a.total_cmp(&self.a))
    }
}

fn kronrod15<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> Result<(f64, f64)> {
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let fc = f(center);
    let mut kronrod = fc * WGK[7];
    let mut gauss = fc * WG[3];
    for j in 0..7 {
        let dx = half * XGK[j];
        let f1 = f(center - dx);
        let f2 = f(center + dx);
        if !(f1.is_finite() && f2.is_finite()) {
            return Err(invalid(format!(
                "integrand is not finite near {}",
                center + dx
            )));
        }
        kronrod += WGK[j] * (f1 + f2);
        if j % 2 == 1 {
            gauss += WG[j / 2] * (f1 + f2);
        }
    }
    if !fc.is_finite() {
        return Err(invalid(format!("integrand is not finite at {center}")));
    }
    let value = kronrod * half;
    let error = ((kronrod - gauss) * half).abs();
    Ok((value, error))
}

fn adaptive<F: Fn(f64) -> f64>(
    f: &F,
    a: f64,
    b: f64,
    spec: &QuadratureSpec,
) -> Result<(Vec<Segment>, Integral)> {
    spec.validate()?;
    if !(a.is_finite() && b.is_finite()) {
        return Err(invalid("finite integration limits required"));
    }
    if a == b {
        return Ok((
            Vec::new(),
            Integral {
                value: 0.0,
                abs_error: 0.0,
                evaluations: 0,
            },
        ));
    }
    let mut heap = BinaryHeap::new();
    let mut frozen = Vec::new();
    let mut evaluations = 0;
    let width = (b - a) / INITIAL_PIECES as f64;
    for i in 0..INITIAL_PIECES {
        let lo = a + width * i as f64;
        let hi = if i + 1 == INITIAL_PIECES { b } else { lo + width };
        let (value, error) = kronrod15(f, lo, hi)?;
        evaluations += 15;
        heap.push(Segment {
            a: lo,
            b: hi,
            value,
            error,
        });
    }

    let mut pieces = INITIAL_PIECES;
    loop {
        let (value, error) = totals(heap.iter().chain(frozen.iter()));
        if error <= spec.tolerance(value) {
            break;
        }
        let Some(worst) = heap.pop() else {
            return Err(Error::NoConvergence {
                what: "adaptive quadrature",
                iterations: pieces,
                error,
            });
        };
        let mid = 0.5 * (worst.a + worst.b);
        if !(mid > worst.a && mid < worst.b) || (worst.b - worst.a) < 1e-14 * mid.abs() {
            frozen.push(worst);
            continue;
        }
        if pieces >= spec.max_subdivisions {
            return Err(Error::NoConvergence {
                what: "adaptive quadrature",
                iterations: pieces,
                error,
            });
        }
        for (lo, hi) in [(worst.a, mid), (mid, worst.b)] {
            let (value, error) = kronrod15(f, lo, hi)?;
            evaluations += 15;
            heap.push(Segment {
                a: lo,
                b: hi,
                value,
                error,
            });
        }
        pieces += 1;
    }

    let mut segments: Vec<Segment> = heap.into_vec();
    segments.extend(frozen);
    segments.sort_by(|x, y| x.a.total_cmp(&y.a));
    let (value, abs_error) = totals(segments.iter());
    Ok((
        segments,
        Integral {
            value,
            abs_error,
            evaluations,
        },
    ))
}

fn totals<'a>(segments: impl Iterator<Item = &'a Segment>) -> (f64, f64) {
    segments.fold((0.0, 0.0), |(v, e), s| (v + s.value, e + s.error))
}

/// Adaptive integral of `f` over the finite interval `[a, b]`.
pub fn integrate<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, spec: &QuadratureSpec) -> Result<Integral> {
    let (lo, hi, sign) = if a <= b { (a, b, 1.0) } else { (b, a, -1.0) };
    let (_, mut integral) = adaptive(&f, lo, hi, spec)?;
    integral.value *= sign;
    Ok(integral)
}

/// Map `u ∈ (0, 1)` to `t = scale · u / (1 - u)`, returning `(t, dt/du)`.
fn half_line_map(u: f64, scale: f64) -> (f64, f64) {
    let w = 1.0 - u;
    (scale * u / w, scale / (w * w))
}

/// `∫₀^∞ f(t) dt` with the substitution `t = scale · u/(1-u)`.
///
/// `scale` should be of the order of where `f` carries its mass (e.g. the
/// mean of a density) so that the initial partition resolves it.
pub fn integrate_semi_infinite_scaled<F: Fn(f64) -> f64>(
    f: F,
    scale: f64,
    spec: &QuadratureSpec,
) -> Result<Integral> {
    if !(scale > 0.0 && scale.is_finite()) {
        return Err(invalid("semi-infinite scale must be positive and finite"));
    }
    let g = |u: f64| {
        let (t, jac) = half_line_map(u, scale);
        let ft = f(t);
        if ft == 0.0 {
            0.0
        } else {
            ft * jac
        }
    };
    let (_, integral) = adaptive(&g, 0.0, 1.0, spec)?;
    Ok(integral)
}

/// `∫₀^∞ f(t) dt` with unit scale.
pub fn integrate_semi_infinite<F: Fn(f64) -> f64>(f: F, spec: &QuadratureSpec) -> Result<f64> {
    integrate_semi_infinite_scaled(f, 1.0, spec).map(|i| i.value)
}

/// A fixed quadrature rule `Σ wᵢ g(tᵢ) ≈ ∫₀^∞ g(t) p(t) dt` for a density `p`.
///
/// Nodes come from the adaptive partition that integrates `p` itself to the
/// requested tolerance, so smooth factors `g` are integrated at comparable
/// accuracy without re-running the adaptive scheme.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityRule {
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl DensityRule {
    pub fn build<P: Fn(f64) -> f64>(pdf: P, scale: f64, spec: &QuadratureSpec) -> Result<Self> {
        if !(scale > 0.0 && scale.is_finite()) {
            return Err(invalid("density scale must be positive and finite"));
        }
        let g = |u: f64| {
            let (t, jac) = half_line_map(u, scale);
            let p = pdf(t);
            if p == 0.0 {
                0.0
            } else {
                p * jac
            }
        };
        let (segments, _) = adaptive(&g, 0.0, 1.0, spec)?;
        let mut nodes = Vec::with_capacity(segments.len() * 15);
        let mut weights = Vec::with_capacity(segments.len() * 15);
        for s in &segments {
            let center = 0.5 * (s.a + s.b);
            let half = 0.5 * (s.b - s.a);
            let mut push = |u: f64, wk: f64| {
                let w = wk * half * g(u);
                if w > 0.0 {
                    nodes.push(half_line_map(u, scale).0);
                    weights.push(w);
                }
            };
            for j in 0..7 {
                push(center - half * XGK[j], WGK[j]);
            }
            push(center, WGK[7]);
            for j in (0..7).rev() {
                push(center + half * XGK[j], WGK[j]);
            }
        }
        Ok(Self { nodes, weights })
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Total mass of the rule (should be ~1 for a density).
    pub fn mass(&self) -> f64 {
        self.weights.iter().sum()
    }

    pub fn expect<G: Fn(f64) -> f64>(&self, g: G) -> f64 {
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(|(&t, &w)| w * g(t))
            .sum()
    }
}

/// Gauss–Legendre nodes and weights on `[-1, 1]`.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let nf = n as f64;
    for i in 0..n.div_ceil(2) {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (nf + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre_with_derivative(n, x);
            dp = d;
            let dx = p / d;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let (_, d) = legendre_with_derivative(n, x);
        if d != 0.0 {
            dp = d;
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    (nodes, weights)
}

fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::special::ChiSquared;
    use approx::assert_relative_eq;

    #[test]
    fn closed_form_half_line_integrals() {
        let spec = QuadratureSpec::default();
        let v = integrate_semi_infinite(|t| (-t).exp(), &spec).unwrap();
        assert!((v - 1.0).abs() < 1e-9);
        let v = integrate_semi_infinite(|t| t * (-t * t).exp(), &spec).unwrap();
        assert!((v - 0.5).abs() < 1e-9);
        let chi = ChiSquared::new(10).unwrap();
        let v = integrate_semi_infinite(|t| chi.pdf(t), &spec).unwrap();
        assert!((v - 1.0).abs() < 1e-8);
    }

    #[test]
    fn peaked_density_with_scale() {
        let chi = ChiSquared::new(1594).unwrap();
        let spec = QuadratureSpec::default();
        let v = integrate_semi_infinite_scaled(|t| chi.pdf(t), chi.mean(), &spec).unwrap();
        assert!((v.value - 1.0).abs() < 1e-8, "{v:?}");
    }

    #[test]
    fn finite_interval_and_reversed_limits() {
        let spec = QuadratureSpec::default();
        let v = integrate(|x| x.sin(), 0.0, std::f64::consts::PI, &spec).unwrap();
        assert_relative_eq!(v.value, 2.0, max_relative = 1e-12);
        let r = integrate(|x| x.sin(), std::f64::consts::PI, 0.0, &spec).unwrap();
        assert_relative_eq!(r.value, -2.0, max_relative = 1e-12);
    }

    #[test]
    fn subdivision_limit_reports_no_convergence() {
        let spec = QuadratureSpec::new(1e-14, 1e-14, 8).unwrap();
        let err = integrate(|x: f64| (1.0 / x.max(1e-300)).sin(), 1e-6, 1.0, &spec).unwrap_err();
        assert!(matches!(err, Error::NoConvergence { .. }));
    }

    #[test]
    fn invalid_spec_rejected() {
        assert!(QuadratureSpec::new(0.0, 1e-8, 10).is_err());
        assert!(QuadratureSpec::new(1e-9, 1e-8, 0).is_err());
    }

    #[test]
    fn density_rule_reproduces_moments() {
        let chi = ChiSquared::new(49).unwrap();
        let rule = DensityRule::build(|t| chi.pdf(t), 49.0, &QuadratureSpec::default()).unwrap();
        assert!((rule.mass() - 1.0).abs() < 1e-9);
        assert!((rule.expect(|t| t) - 49.0).abs() < 1e-6);
        assert!((rule.expect(|t| (t - 49.0).powi(2)) - 98.0).abs() < 1e-5);
    }

    #[test]
    fn gauss_legendre_exact_for_polynomials() {
        for n in [1usize, 2, 5, 12, 16] {
            let (x, w) = gauss_legendre(n);
            assert_relative_eq!(w.iter().sum::<f64>(), 2.0, max_relative = 1e-13);
            for deg in 0..(2 * n) {
                let exact = if deg % 2 == 1 { 0.0 } else { 2.0 / (deg as f64 + 1.0) };
                let approx: f64 = x.iter().zip(&w).map(|(xi, wi)| wi * xi.powi(deg as i32)).sum();
                assert!((approx - exact).abs() < 1e-13, "n={n} deg={deg}");
            }
        }
    }
}
