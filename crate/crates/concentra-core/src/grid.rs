//! Graded radial grid: uniform near the origin, geometric far out, joined by
//! a smooth map `r(s)` so that centered differences in `s` keep their order.

use num_traits::Float;
use crate::quadrature::gk15;
use alloc::vec;
use alloc::vec::Vec;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridSpec {
    /// Coarse spacing near the origin; nodes are placed at half of it.
    pub h: f64,
    /// End of the uniform part.
    pub r_flat: f64,
    /// Spacing ratio between consecutive coarse cells far out.
    pub growth: f64,
    pub r_max: f64,
}

impl Default for GridSpec {
    fn default() -> Self {
        Self { h: 0.02, r_flat: 10.0, growth: 1.02, r_max: 200.0 }
    }
}

/// Node `i` sits at `s = i`; the coarse subgrid is the even nodes.
#[derive(Debug, Clone, PartialEq)]
pub struct RadialGrid {
    pub spec: GridSpec,
    pub r: Vec<f64>,
    pub rs: Vec<f64>,
    pub rss: Vec<f64>,
    /// Composite Simpson weights for `int_0^{r_max} f dr`.
    pub weights: Vec<f64>,
}

// width of the softplus blend, in nodes
const BLEND: f64 = 40.0;

fn softplus(x: f64) -> (f64, f64) {
    let z = x / BLEND;
    if z > 30.0 {
        (x, 1.0)
    } else {
        (BLEND * z.exp().ln_1p(), 1.0 / (1.0 + (-z).exp()))
    }
}

impl RadialGrid {
    pub fn new(spec: GridSpec) -> Self {
        Self::build(spec, 1, None)
    }

    // Nodes at s = i / sub; stops at the first multiple of 4 coarse cells past
    // r_max, or after `count` nodes.
    fn build(spec: GridSpec, sub: usize, count: Option<usize>) -> Self {
        let h = 0.5 * spec.h;
        let beta = 0.5 * spec.growth.ln();
        let s1 = spec.r_flat / h;
        let rs_of = |s: f64| h * (beta * softplus(s - s1).0).exp();
        let step = 1.0 / sub as f64;
        let mut r = vec![0.0];
        let mut rs = Vec::new();
        let mut rss = Vec::new();
        let mut i = 0usize;
        loop {
            let s = i as f64 * step;
            let (sp, dsp) = softplus(s - s1);
            let d = h * (beta * sp).exp();
            rs.push(d * step);
            rss.push(d * beta * dsp * step * step);
            let done = match count {
                Some(c) => i + 1 == c,
                None => r[i] >= spec.r_max && i % 4 == 0,
            };
            if done {
                break;
            }
            let (inc, _) = gk15(&rs_of, s, s + step);
            r.push(r[i] + inc);
            i += 1;
        }
        let n = r.len();
        let mut weights = vec![0.0; n];
        for j in 0..n {
            let c = if j == 0 || j == n - 1 { 1.0 } else if j % 2 == 1 { 4.0 } else { 2.0 };
            weights[j] = c / 3.0 * rs[j];
        }
        Self { spec, r, rs, rss, weights }
    }

    /// The grid with every cell bisected by the same map; its even nodes are this grid.
    pub fn refined(&self) -> RadialGrid {
        Self::build(self.spec, 2, Some(2 * self.len() - 1))
    }

    pub fn len(&self) -> usize {
        self.r.len()
    }

    pub fn is_empty(&self) -> bool {
        self.r.is_empty()
    }

    pub fn r_max(&self) -> f64 {
        *self.r.last().expect("grid non-empty")
    }

    pub fn sample(&self, f: impl Fn(f64) -> f64) -> Vec<f64> {
        self.r.iter().map(|&r| f(r)).collect()
    }

    /// `int_0^{r_max} f dr` of node values.
    pub fn integrate(&self, f: &[f64]) -> f64 {
        f.iter().zip(&self.weights).map(|(a, b)| a * b).sum()
    }

    /// `d/dr` and `d^2/dr^2` of node values, fourth order in `s`.
    ///
    /// `parity` is the parity of the profile across `r = 0` (+1 even, -1 odd).
    pub fn derivatives(&self, u: &[f64], parity: f64) -> (Vec<f64>, Vec<f64>) {
        let n = u.len();
        let at = |k: isize| -> f64 {
            if k < 0 {
                parity * u[(-k) as usize]
            } else {
                u[k as usize]
            }
        };
        let mut d1 = vec![0.0; n];
        let mut d2 = vec![0.0; n];
        for i in 0..n {
            let k = i as isize;
            let (us, uss) = if i + 2 < n {
                (
                    (-at(k + 2) + 8.0 * at(k + 1) - 8.0 * at(k - 1) + at(k - 2)) / 12.0,
                    (-at(k + 2) + 16.0 * at(k + 1) - 30.0 * at(k) + 16.0 * at(k - 1) - at(k - 2)) / 12.0,
                )
            } else {
                // one-sided fourth order at the outer end
                let b = |j: usize| u[i - j];
                if i + 1 < n {
                    (
                        (3.0 * u[i + 1] + 10.0 * b(0) - 18.0 * b(1) + 6.0 * b(2) - b(3)) / 12.0,
                        (11.0 * u[i + 1] - 20.0 * b(0) + 6.0 * b(1) + 4.0 * b(2) - b(3)) / 12.0,
                    )
                } else {
                    (
                        (25.0 * b(0) - 48.0 * b(1) + 36.0 * b(2) - 16.0 * b(3) + 3.0 * b(4)) / 12.0,
                        (35.0 * b(0) - 104.0 * b(1) + 114.0 * b(2) - 56.0 * b(3) + 11.0 * b(4)) / 12.0,
                    )
                }
            };
            let rs = self.rs[i];
            d1[i] = us / rs;
            d2[i] = (uss - self.rss[i] / rs * us) / (rs * rs);
        }
        (d1, d2)
    }

    /// Index `i` with `r[i] <= x < r[i+1]`, clamped.
    pub fn locate(&self, x: f64) -> usize {
        match self.r.binary_search_by(|v| v.partial_cmp(&x).expect("finite grid")) {
            Ok(i) => i.min(self.len() - 2),
            Err(i) => i.saturating_sub(1).min(self.len() - 2),
        }
    }

    /// Cubic Lagrange interpolation of node values at `x`; zero beyond `r_max`.
    pub fn interpolate(&self, u: &[f64], x: f64) -> f64 {
        if x > self.r_max() {
            return 0.0;
        }
        let i = self.locate(x);
        let lo = i.saturating_sub(1).min(self.len() - 4);
        let idx = [lo, lo + 1, lo + 2, lo + 3];
        let mut s = 0.0;
        for (a, &ia) in idx.iter().enumerate() {
            let mut l = 1.0;
            for (b, &ib) in idx.iter().enumerate() {
                if a != b {
                    l *= (x - self.r[ib]) / (self.r[ia] - self.r[ib]);
                }
            }
            s += l * u[ia];
        }
        s
    }

    /// The even-node subgrid with its own Simpson weights (used for extrapolation).
    pub fn coarse(&self) -> RadialGrid {
        let r: Vec<f64> = self.r.iter().step_by(2).copied().collect();
        let rs: Vec<f64> = self.rs.iter().step_by(2).map(|v| 2.0 * v).collect();
        let rss: Vec<f64> = self.rss.iter().step_by(2).map(|v| 4.0 * v).collect();
        let n = r.len();
        let mut weights = vec![0.0; n];
        let even = n % 2 == 1;
        for j in 0..n {
            let c = if !even {
                // trapezoid fallback for an even count
                if j == 0 || j == n - 1 { 0.5 } else { 1.0 }
            } else if j == 0 || j == n - 1 {
                1.0 / 3.0
            } else if j % 2 == 1 {
                4.0 / 3.0
            } else {
                2.0 / 3.0
            };
            weights[j] = c * rs[j];
        }
        RadialGrid { spec: self.spec, r, rs, rss, weights }
    }
}

/// Solves a tridiagonal system in place of `d`; `a` is the sub-, `b` the main
/// and `c` the super-diagonal. Returns `None` on a zero pivot.
pub fn solve_tridiagonal(a: &[f64], b: &[f64], c: &[f64], d: &mut [f64]) -> Option<()> {
    let n = b.len();
    let mut cp = vec![0.0; n];
    let mut piv = b[0];
    if piv == 0.0 || !piv.is_finite() {
        return None;
    }
    cp[0] = c[0] / piv;
    d[0] /= piv;
    for i in 1..n {
        piv = b[i] - a[i] * cp[i - 1];
        if piv == 0.0 || !piv.is_finite() {
            return None;
        }
        cp[i] = if i + 1 < n { c[i] / piv } else { 0.0 };
        d[i] = (d[i] - a[i] * d[i - 1]) / piv;
    }
    for i in (0..n - 1).rev() {
        d[i] -= cp[i] * d[i + 1];
    }
    Some(())
}

/// Spreads a correction known on even nodes to all nodes by cubic interpolation in the index.
pub fn prolong(even: &[f64], n: usize) -> Vec<f64> {
    let m = even.len();
    let mut out = vec![0.0; n];
    for i in 0..n {
        if i % 2 == 0 {
            out[i] = even[i / 2];
        } else {
            let k = i / 2;
            out[i] = if k >= 1 && k + 2 < m {
                (-even[k - 1] + 9.0 * even[k] + 9.0 * even[k + 1] - even[k + 2]) / 16.0
            } else if k + 2 < m {
                (3.0 * even[k] + 6.0 * even[k + 1] - even[k + 2]) / 8.0
            } else if k >= 1 && k + 1 < m {
                (-even[k - 1] + 6.0 * even[k] + 3.0 * even[k + 1]) / 8.0
            } else {
                even[k]
            };
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn default_grid_shape() {
        let g = RadialGrid::new(GridSpec::default());
        assert_eq!(g.r[0], 0.0);
        assert!((g.r[1] - 0.01).abs() < 1e-12);
        assert!(g.len() % 2 == 1);
        assert!(g.r_max() >= 200.0 && g.r_max() < 210.0);
        // near-uniform spacing up to the blend, growing after
        let i10 = g.locate(8.0);
        assert!((g.r[i10 + 1] - g.r[i10] - 0.01).abs() < 1e-4);
        assert!(g.len() < 2000, "{}", g.len());
    }

    #[test]
    fn simpson_integrates_smooth_function() {
        let g = RadialGrid::new(GridSpec::default());
        let f = g.sample(|r| (-r).exp());
        assert!((g.integrate(&f) - 1.0).abs() < 1e-10);
        let c = g.coarse();
        let fc = c.sample(|r| (-r).exp());
        assert!((c.integrate(&fc) - 1.0).abs() < 1e-8);
    }

    #[test]
    fn derivatives_fourth_order() {
        let g = RadialGrid::new(GridSpec::default());
        let u = g.sample(|r| (-r * r / 8.0).exp());
        let (d1, d2) = g.derivatives(&u, 1.0);
        for (i, &r) in g.r.iter().enumerate() {
            let e = (-r * r / 8.0).exp();
            assert!((d1[i] + r / 4.0 * e).abs() < 1e-8, "r={r}");
            assert!((d2[i] - (r * r / 16.0 - 0.25) * e).abs() < 1e-7, "r={r}");
        }
    }

    #[test]
    fn refined_grid_nests() {
        let g = RadialGrid::new(GridSpec::default());
        let f = g.refined();
        assert_eq!(f.len(), 2 * g.len() - 1);
        for i in (0..g.len()).step_by(97) {
            assert!((f.r[2 * i] - g.r[i]).abs() < 1e-9 * (1.0 + g.r[i]));
            assert!((2.0 * f.rs[2 * i] - g.rs[i]).abs() < 1e-12);
        }
    }

    #[test]
    fn tridiagonal_solve() {
        let n = 50;
        let a = vec![-1.0; n];
        let b = vec![4.0; n];
        let c = vec![-1.0; n];
        let x: Vec<f64> = (0..n).map(|i| (i as f64).sin()).collect();
        let mut d: Vec<f64> = (0..n)
            .map(|i| 4.0 * x[i] - if i > 0 { x[i - 1] } else { 0.0 } - if i + 1 < n { x[i + 1] } else { 0.0 })
            .collect();
        solve_tridiagonal(&a, &b, &c, &mut d).unwrap();
        for i in 0..n {
            assert!((d[i] - x[i]).abs() < 1e-13);
        }
    }

    proptest! {
        #[test]
        fn interpolation_reproduces_cubics(x in 0.0f64..199.0, a in -2.0f64..2.0, b in -2.0f64..2.0) {
            let g = RadialGrid::new(GridSpec::default());
            let f = |r: f64| a + b * r - 0.01 * r * r + 1e-4 * r * r * r;
            let u = g.sample(f);
            prop_assert!((g.interpolate(&u, x) - f(x)).abs() < 1e-8 * (1.0 + f(x).abs()));
        }
    }
}
