//! Fixed-order Gauss rules and composite helpers.
//!
//! Nodes are computed by Newton iteration on the three-term recurrences, which
//! is accurate to a few ulps for the orders used here (up to a few hundred).

use std::f64::consts::PI;

/// Gauss-Legendre nodes and weights on `[-1, 1]`.
#[derive(Debug, Clone)]
pub struct GaussLegendre {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl GaussLegendre {
    pub fn new(order: usize) -> Self {
        assert!(order >= 1, "Gauss-Legendre order must be at least 1");
        let n = order;
        let mut nodes = vec![0.0; n];
        let mut weights = vec![0.0; n];
        let half = n.div_ceil(2);
        for i in 0..half {
            let mut x = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
            let mut dp = 0.0;
            for _ in 0..100 {
                let (p, d) = legendre_with_derivative(n, x);
                dp = d;
                let dx = p / d;
                x -= dx;
                if dx.abs() <= 1e-16 * x.abs().max(1.0) {
                    let (_, d) = legendre_with_derivative(n, x);
                    dp = d;
                    break;
                }
            }
            let w = 2.0 / ((1.0 - x * x) * dp * dp);
            nodes[i] = -x;
            nodes[n - 1 - i] = x;
            weights[i] = w;
            weights[n - 1 - i] = w;
        }
        if n % 2 == 1 {
            nodes[n / 2] = 0.0;
        }
        Self { nodes, weights }
    }

    pub fn order(&self) -> usize {
        self.nodes.len()
    }

    /// Integrate `f` over `[a, b]`.
    pub fn integrate<F: FnMut(f64) -> f64>(&self, a: f64, b: f64, mut f: F) -> f64 {
        let mid = 0.5 * (a + b);
        let half = 0.5 * (b - a);
        let sum: f64 = self
            .nodes
            .iter()
            .zip(&self.weights)
            .map(|(&x, &w)| w * f(mid + half * x))
            .sum();
        sum * half
    }

    /// Composite rule: `panels` equal sub-intervals of `[a, b]`.
    pub fn integrate_composite<F: FnMut(f64) -> f64>(
        &self,
        a: f64,
        b: f64,
        panels: usize,
        mut f: F,
    ) -> f64 {
        let width = (b - a) / panels as f64;
        (0..panels)
            .map(|k| {
                let lo = a + k as f64 * width;
                self.integrate(lo, lo + width, &mut f)
            })
            .sum()
    }
}

fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    for k in 2..=n {
        let k = k as f64;
        let p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = p2;
    }
    let nf = n as f64;
    let d = nf * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

/// Gauss-Hermite rule for the weight `exp(-x^2)` on the real line.
#[derive(Debug, Clone)]
pub struct GaussHermite {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl GaussHermite {
    pub fn new(order: usize) -> Self {
        assert!(order >= 1, "Gauss-Hermite order must be at least 1");
        let n = order;
        let nf = n as f64;
        let mut nodes = vec![0.0; n];
        let mut weights = vec![0.0; n];
        let half = n.div_ceil(2);
        let mut z = 0.0;
        for i in 0..half {
            // Initial guesses for the largest roots first (Numerical Recipes scheme).
            z = match i {
                0 => (2.0 * nf + 1.0).sqrt() - 1.85575 * (2.0 * nf + 1.0).powf(-1.0 / 6.0),
                1 => z - 1.14 * nf.powf(0.426) / z,
                2 => 1.86 * z - 0.86 * nodes[n - 1],
                3 => 1.91 * z - 0.91 * nodes[n - 2],
                _ => 2.0 * z - nodes[n - i + 1],
            };
            let mut dp = 0.0;
            for _ in 0..200 {
                let (p, d) = hermite_normalized(n, z);
                dp = d;
                let dz = p / d;
                z -= dz;
                if dz.abs() <= 1e-15 * z.abs().max(1.0) {
                    let (_, d) = hermite_normalized(n, z);
                    dp = d;
                    break;
                }
            }
            nodes[n - 1 - i] = z;
            nodes[i] = -z;
            let w = 2.0 / (dp * dp);
            weights[n - 1 - i] = w;
            weights[i] = w;
        }
        if n % 2 == 1 {
            nodes[n / 2] = 0.0;
        }
        Self { nodes, weights }
    }

    pub fn order(&self) -> usize {
        self.nodes.len()
    }
}

/// Orthonormal Hermite function recurrence; returns (p_n, p_n') without the
/// Gaussian factor, scaled so the weights come out as `2 / p_n'^2`.
fn hermite_normalized(n: usize, x: f64) -> (f64, f64) {
    let mut p1 = PI.powf(-0.25);
    let mut p2 = 0.0;
    for j in 1..=n {
        let p3 = p2;
        p2 = p1;
        let jf = j as f64;
        p1 = x * (2.0 / jf).sqrt() * p2 - ((jf - 1.0) / jf).sqrt() * p3;
    }
    let d = (2.0 * n as f64).sqrt() * p2;
    (p1, d)
}

/// Composite trapezoid rule on `points` equally spaced samples of `[a, b]`.
pub fn trapezoid<F: FnMut(f64) -> f64>(a: f64, b: f64, points: usize, mut f: F) -> f64 {
    assert!(points >= 2, "trapezoid needs at least two points");
    let h = (b - a) / (points - 1) as f64;
    let mut sum = 0.5 * (f(a) + f(b));
    for k in 1..points - 1 {
        sum += f(a + k as f64 * h);
    }
    sum * h
}

/// Trapezoid rule over already-sampled, uniformly spaced values.
pub fn trapezoid_samples(values: &[f64], spacing: f64) -> f64 {
    match values {
        [] | [_] => 0.0,
        [first, inner @ .., last] => (0.5 * (first + last) + inner.iter().sum::<f64>()) * spacing,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn legendre_integrates_polynomials_exactly() {
        let gl = GaussLegendre::new(8);
        // degree 15 is the highest exact degree for 8 nodes
        let v = gl.integrate(-1.0, 1.0, |x| x.powi(15) + x.powi(14));
        assert_relative_eq!(v, 2.0 / 15.0, max_relative = 1e-14);
        assert_relative_eq!(gl.weights.iter().sum::<f64>(), 2.0, max_relative = 1e-14);
    }

    #[test]
    fn legendre_high_order_is_stable() {
        let gl = GaussLegendre::new(128);
        let v = gl.integrate(0.0, PI, f64::sin);
        assert_relative_eq!(v, 2.0, max_relative = 1e-14);
        assert!(gl.nodes.windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn hermite_moments() {
        for order in [1, 2, 5, 20, 64, 100] {
            let gh = GaussHermite::new(order);
            let m0: f64 = gh.weights.iter().sum();
            assert_relative_eq!(m0, PI.sqrt(), max_relative = 1e-13);
            if order >= 2 {
                let m2: f64 = gh.nodes.iter().zip(&gh.weights).map(|(x, w)| w * x * x).sum();
                assert_relative_eq!(m2, 0.5 * PI.sqrt(), max_relative = 1e-13);
            }
        }
    }

    #[test]
    fn hermite_gaussian_fourier_transform() {
        // int exp(-x^2) cos(kx) dx = sqrt(pi) exp(-k^2/4)
        let gh = GaussHermite::new(64);
        for k in [0.0, 0.3, 1.0, 2.5] {
            let v: f64 = gh.nodes.iter().zip(&gh.weights).map(|(x, w)| w * (k * x).cos()).sum();
            assert_relative_eq!(v, PI.sqrt() * (-k * k / 4.0).exp(), max_relative = 1e-13);
        }
    }

    #[test]
    fn trapezoid_is_exact_for_lines() {
        assert_relative_eq!(trapezoid(0.0, 2.0, 3, |x| 3.0 * x + 1.0), 8.0, max_relative = 1e-15);
        assert_relative_eq!(trapezoid_samples(&[1.0, 3.0, 5.0], 1.0), 6.0);
        assert_eq!(trapezoid_samples(&[4.0], 1.0), 0.0);
    }
}
