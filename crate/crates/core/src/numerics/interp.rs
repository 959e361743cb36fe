/// Chebyshev interpolant of a smooth function on `[a, b]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Chebyshev {
    a: f64,
    b: f64,
    coeffs: Vec<f64>,
}

impl Chebyshev {
    /// Chebyshev points of the first kind mapped to `[a, b]`.
    pub fn points(a: f64, b: f64, n: usize) -> Vec<f64> {
        (0..n)
            .map(|j| {
                let theta = std::f64::consts::PI * (j as f64 + 0.5) / n as f64;
                0.5 * (a + b) + 0.5 * (b - a) * theta.cos()
            })
            .collect()
    }

    /// Build from function values sampled at [`Chebyshev::points`]`(a, b, values.len())`.
    pub fn from_values(a: f64, b: f64, values: &[f64]) -> Self {
        let n = values.len();
        let coeffs = (0..n)
            .map(|k| {
                let s: f64 = values
                    .iter()
                    .enumerate()
                    .map(|(j, v)| {
                        v * (std::f64::consts::PI * k as f64 * (j as f64 + 0.5) / n as f64).cos()
                    })
                    .sum();
                let c = 2.0 * s / n as f64;
                if k == 0 {
                    0.5 * c
                } else {
                    c
                }
            })
            .collect();
        Self { a, b, coeffs }
    }

    pub fn fit<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, n: usize) -> Self {
        let values: Vec<f64> = Self::points(a, b, n).into_iter().map(f).collect();
        Self::from_values(a, b, &values)
    }

    pub fn domain(&self) -> (f64, f64) {
        (self.a, self.b)
    }

    /// Magnitude of the trailing coefficients, a cheap truncation-error proxy.
    pub fn tail(&self) -> f64 {
        self.coeffs.iter().rev().take(3).map(|c| c.abs()).fold(0.0, f64::max)
    }

    /// Clenshaw evaluation; `x` is clamped into the domain.
    pub fn eval(&self, x: f64) -> f64 {
        let x = x.clamp(self.a, self.b);
        let u = (2.0 * x - self.a - self.b) / (self.b - self.a);
        let mut b1 = 0.0;
        let mut b2 = 0.0;
        for &c in self.coeffs.iter().skip(1).rev() {
            let t = 2.0 * u * b1 - b2 + c;
            b2 = b1;
            b1 = t;
        }
        u * b1 - b2 + self.coeffs[0]
    }
}
