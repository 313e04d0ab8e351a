//! Symmetric tridiagonal eigenpairs: Sturm-sequence bisection for the values,
//! inverse iteration for the vectors.

/// Symmetric tridiagonal matrix with diagonal `diag` and off-diagonal `off`
/// (`off.len() == diag.len() - 1`).
#[derive(Debug, Clone)]
pub struct SymTridiagonal {
    pub diag: Vec<f64>,
    pub off: Vec<f64>,
}

impl SymTridiagonal {
    pub fn new(diag: Vec<f64>, off: Vec<f64>) -> Self {
        assert!(!diag.is_empty());
        assert_eq!(off.len() + 1, diag.len());
        Self { diag, off }
    }

    pub fn len(&self) -> usize {
        self.diag.len()
    }

    /// Gershgorin interval containing every eigenvalue.
    pub fn gershgorin(&self) -> (f64, f64) {
        let n = self.len();
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for i in 0..n {
            let r = if i > 0 { self.off[i - 1].abs() } else { 0.0 } + if i + 1 < n { self.off[i].abs() } else { 0.0 };
            lo = lo.min(self.diag[i] - r);
            hi = hi.max(self.diag[i] + r);
        }
        (lo, hi)
    }

    /// Number of eigenvalues strictly below `x`.
    pub fn count_below(&self, x: f64) -> usize {
        let mut count = 0;
        let mut d = self.diag[0] - x;
        if d < 0.0 {
            count += 1;
        }
        for i in 1..self.len() {
            let pivot = if d == 0.0 { f64::EPSILON * self.off[i - 1].abs().max(f64::MIN_POSITIVE) } else { d };
            d = self.diag[i] - x - self.off[i - 1] * self.off[i - 1] / pivot;
            if d < 0.0 {
                count += 1;
            }
        }
        count
    }

    /// The `k`-th smallest eigenvalue (0-based) by bisection.
    pub fn eigenvalue(&self, k: usize) -> f64 {
        assert!(k < self.len());
        let (mut lo, mut hi) = self.gershgorin();
        let span = (hi - lo).max(f64::MIN_POSITIVE);
        lo -= 1e-12 * span;
        hi += 1e-12 * span;
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            if self.count_below(mid) > k {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        0.5 * (lo + hi)
    }

    pub fn lowest(&self, k: usize) -> Vec<f64> {
        (0..k.min(self.len())).map(|i| self.eigenvalue(i)).collect()
    }

    #[cfg(test)]
    pub fn mul(&self, x: &[f64]) -> Vec<f64> {
        let n = self.len();
        (0..n)
            .map(|i| {
                let mut y = self.diag[i] * x[i];
                if i > 0 {
                    y += self.off[i - 1] * x[i - 1];
                }
                if i + 1 < n {
                    y += self.off[i] * x[i + 1];
                }
                y
            })
            .collect()
    }

    /// Unit eigenvector for an accurate eigenvalue `lambda`, orthogonalized
    /// against `previous` (for clustered eigenvalues).
    pub fn eigenvector(&self, lambda: f64, previous: &[Vec<f64>]) -> Vec<f64> {
        let n = self.len();
        let scale = self.diag.iter().chain(&self.off).fold(0.0_f64, |a, b| a.max(b.abs())).max(1.0);
        let shift = lambda + 4.0 * f64::EPSILON * scale;
        let lu = TridiagonalLu::factor(&self.diag, &self.off, shift);
        let mut x: Vec<f64> = (0..n).map(|i| 1.0 + ((i * 7919) % 31) as f64 * 1e-3).collect();
        for _ in 0..4 {
            for v in previous {
                let dot: f64 = x.iter().zip(v).map(|(a, b)| a * b).sum();
                x.iter_mut().zip(v).for_each(|(a, b)| *a -= dot * b);
            }
            normalize(&mut x);
            x = lu.solve(&x);
            normalize(&mut x);
        }
        for v in previous {
            let dot: f64 = x.iter().zip(v).map(|(a, b)| a * b).sum();
            x.iter_mut().zip(v).for_each(|(a, b)| *a -= dot * b);
        }
        normalize(&mut x);
        x
    }
}

fn normalize(x: &mut [f64]) {
    let norm = x.iter().map(|v| v * v).sum::<f64>().sqrt();
    if norm > 0.0 {
        x.iter_mut().for_each(|v| *v /= norm);
    }
}

/// LU factorization of `T − σI` with partial pivoting (the banded scheme of
/// LAPACK's `gttrf`).
struct TridiagonalLu {
    // rows of U: u0 (diagonal), u1 (first super), u2 (second super from pivoting)
    u0: Vec<f64>,
    u1: Vec<f64>,
    u2: Vec<f64>,
    l: Vec<f64>,
    swapped: Vec<bool>,
}

impl TridiagonalLu {
    fn factor(diag: &[f64], off: &[f64], shift: f64) -> Self {
        let n = diag.len();
        let mut d: Vec<f64> = diag.iter().map(|v| v - shift).collect();
        let mut du: Vec<f64> = off.to_vec();
        let mut dl: Vec<f64> = off.to_vec();
        let mut du2 = vec![0.0; n.saturating_sub(2)];
        let mut l = vec![0.0; n.saturating_sub(1)];
        let mut swapped = vec![false; n.saturating_sub(1)];
        let tiny = f64::EPSILON * diag.iter().fold(1.0_f64, |a, b| a.max(b.abs()));
        for i in 0..n.saturating_sub(1) {
            if d[i].abs() >= dl[i].abs() {
                let pivot = if d[i] == 0.0 { tiny } else { d[i] };
                d[i] = pivot;
                let f = dl[i] / pivot;
                l[i] = f;
                d[i + 1] -= f * du[i];
            } else {
                let f = d[i] / dl[i];
                d[i] = dl[i];
                l[i] = f;
                let tmp = du[i];
                du[i] = d[i + 1];
                d[i + 1] = tmp - f * d[i + 1];
                if i + 2 < n {
                    du2[i] = du[i + 1];
                    du[i + 1] *= -f;
                }
                swapped[i] = true;
            }
            dl[i] = 0.0;
        }
        if d[n - 1] == 0.0 {
            d[n - 1] = tiny;
        }
        Self {
            u0: d,
            u1: du,
            u2: du2,
            l,
            swapped,
        }
    }

    fn solve(&self, b: &[f64]) -> Vec<f64> {
        let n = self.u0.len();
        let mut x = b.to_vec();
        for i in 0..n.saturating_sub(1) {
            if self.swapped[i] {
                let tmp = x[i];
                x[i] = x[i + 1];
                x[i + 1] = tmp - self.l[i] * x[i];
            } else {
                x[i + 1] -= self.l[i] * x[i];
            }
        }
        x[n - 1] /= self.u0[n - 1];
        if n >= 2 {
            x[n - 2] = (x[n - 2] - self.u1[n - 2] * x[n - 1]) / self.u0[n - 2];
        }
        for i in (0..n.saturating_sub(2)).rev() {
            x[i] = (x[i] - self.u1[i] * x[i + 1] - self.u2[i] * x[i + 2]) / self.u0[i];
        }
        x
    }
}
