//! The positive eigenpair of `Delta + p w0^{p-1}` among radial functions.

use num_traits::Float;
use crate::bubble::{Bubble, DimensionParams};
use crate::error::{Error, Result};
use crate::grid::solve_tridiagonal;
use crate::quadrature::sphere_area;
use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EigenOptions {
    pub h: f64,
    pub r_max: f64,
    /// Start of the exponential tail model.
    pub r_fit: f64,
}

impl Default for EigenOptions {
    fn default() -> Self {
        Self { h: 0.0025, r_max: 40.0, r_fit: 30.0 }
    }
}

/// `lambda0` and `Z` with `Delta Z + p w0^{p-1} Z = lambda0 Z`,
/// `int_{R^N} Z^2 = 1`, `Z(0) > 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct Eigenpair {
    pub dims: DimensionParams,
    pub opts: EigenOptions,
    pub lambda0: f64,
    /// Raw finite-difference eigenvalues at `h`, `h/3`, `h/9`.
    pub lambda_levels: [f64; 3],
    /// Relative change of the extrapolated eigenvalue under grid halving.
    pub drift: f64,
    /// Sup of `|Delta Z + p w^{p-1} Z - lambda0 Z|` by an independent fourth-order stencil.
    pub residual: f64,
    values: Vec<f64>,
    slopes: Vec<f64>,
    tail_coef: f64,
}

// Cell-centred nodes r_i = (i + 1/2) h; the even reflection u_{-1} = u_0 closes
// the first row, so the discrete error expands smoothly in h^2.
fn fd_eigen(b: &Bubble, h: f64, r_max: f64) -> Result<(f64, Vec<f64>)> {
    let n = b.dims.n();
    let m = (r_max / h).round() as usize;
    let (mut sub, mut diag, mut sup) = (vec![0.0; m], vec![0.0; m], vec![0.0; m]);
    let h2 = h * h;
    for i in 0..m {
        let r = (i as f64 + 0.5) * h;
        sub[i] = -1.0 / h2 + (n - 1.0) / (2.0 * r * h);
        diag[i] = 2.0 / h2 - b.potential(r);
        sup[i] = -1.0 / h2 - (n - 1.0) / (2.0 * r * h);
    }
    diag[0] += sub[0];
    let mut x: Vec<f64> = (0..m).map(|i| (-(i as f64 * h)).exp()).collect();
    let mut shift = -b.potential(0.0) - 1.0;
    let mut nu = shift;
    let mut fixed = true;
    for it in 0..400 {
        let mut d = diag.clone();
        for v in d.iter_mut() {
            *v -= shift;
        }
        let mut y = x.clone();
        solve_tridiagonal(&sub, &d, &sup, &mut y)
            .ok_or_else(|| Error::Numerical("singular shifted operator in inverse iteration".into()))?;
        let xy: f64 = x.iter().zip(&y).map(|(a, b)| a * b).sum();
        let xx: f64 = x.iter().map(|a| a * a).sum();
        let new_nu = shift + xx / xy;
        let ny = y.iter().map(|a| a * a).sum::<f64>().sqrt();
        for (xi, yi) in x.iter_mut().zip(&y) {
            *xi = yi / ny;
        }
        let change = (new_nu - nu).abs();
        nu = new_nu;
        if fixed && change < 1e-6 * nu.abs() && it > 5 {
            fixed = false;
        }
        if !fixed {
            if change < 1e-15 * nu.abs() {
                break;
            }
            shift = nu;
        }
    }
    if !(nu < 0.0) {
        return Err(Error::Numerical(format!("no positive eigenvalue found (nu = {nu})")));
    }
    normalize(&mut x, h, n);
    Ok((-nu, x))
}

// Midpoint rule on cell centres; the integrand is even-smooth at the origin and
// negligible at r_max, so the rule is accurate far beyond second order.
fn normalize(u: &mut [f64], h: f64, n: f64) {
    let s: f64 = u.iter().enumerate().map(|(i, v)| ((i as f64 + 0.5) * h).powf(n - 1.0) * v * v).sum();
    let norm = (s * h * sphere_area(n as usize)).sqrt();
    let sign = if u[0] < 0.0 { -1.0 } else { 1.0 };
    for v in u.iter_mut() {
        *v *= sign / norm;
    }
}

// First and second differences (times h, h^2), fourth order, even reflection about r = 0.
fn stencil(u: &[f64], i: usize) -> (f64, f64) {
    let at = |k: isize| if k < 0 { u[(-k - 1) as usize] } else { u[k as usize] };
    let k = i as isize;
    (
        (-at(k + 2) + 8.0 * at(k + 1) - 8.0 * at(k - 1) + at(k - 2)) / 12.0,
        (-at(k + 2) + 16.0 * at(k + 1) - 30.0 * at(k) + 16.0 * at(k - 1) - at(k - 2)) / 12.0,
    )
}

impl Eigenpair {
    pub fn compute(dims: DimensionParams) -> Result<Self> {
        Self::compute_with(dims, EigenOptions::default())
    }

    /// Inverse iteration on second-order differences at `h`, `h/3`, `h/9`,
    /// combined by Richardson extrapolation.
    pub fn compute_with(dims: DimensionParams, opts: EigenOptions) -> Result<Self> {
        let b = Bubble::new(dims);
        let n = dims.n();
        let h = opts.h;
        let (l1, z1) = fd_eigen(&b, h, opts.r_max)?;
        let (l2, z2) = fd_eigen(&b, h / 3.0, opts.r_max)?;
        let (l3, _) = fd_eigen(&b, h / 9.0, opts.r_max)?;
        let lambda0 = (9.0 * l2 - l1) / 8.0;
        let finer = (9.0 * l3 - l2) / 8.0;
        let drift = ((lambda0 - finer) / finer).abs();
        let mut values: Vec<f64> = z1.iter().enumerate().map(|(i, c)| (9.0 * z2[3 * i + 1] - c) / 8.0).collect();
        normalize(&mut values, h, n);
        let m = values.len();
        let mut slopes = vec![0.0; m];
        let mut residual: f64 = 0.0;
        let i_fit = (opts.r_fit / h - 0.5).round() as usize;
        for i in 0..m.saturating_sub(2) {
            let (d1, d2) = stencil(&values, i);
            slopes[i] = d1 / h;
            if i <= i_fit {
                let r = (i as f64 + 0.5) * h;
                let lap = d2 / (h * h) + (n - 1.0) / r * d1 / h;
                let res = lap + b.potential(r) * values[i] - lambda0 * values[i];
                residual = residual.max(res.abs());
            }
        }
        let rf = (i_fit as f64 + 0.5) * h;
        let tail_coef = values[i_fit] * (lambda0.sqrt() * rf).exp() * rf.powf((n - 1.0) / 2.0);
        let opts = EigenOptions { r_fit: rf, ..opts };
        Ok(Self { dims, opts, lambda0, lambda_levels: [l1, l2, l3], drift, residual, values, slopes, tail_coef })
    }

    /// Radial profile of `Z`.
    pub fn eval(&self, r: f64) -> f64 {
        let r = r.abs();
        if r >= self.opts.r_fit {
            return self.tail_coef * (-self.lambda0.sqrt() * r).exp() * r.powf(-(self.dims.n() - 1.0) / 2.0);
        }
        let h = self.opts.h;
        let s = r / h - 0.5;
        // node -1 is the mirror image of node 0
        let node = |k: isize| {
            if k < 0 {
                (self.values[0], -self.slopes[0])
            } else {
                (self.values[k as usize], self.slopes[k as usize])
            }
        };
        let k = (s.floor() as isize).min(self.values.len() as isize - 2);
        let t = s - k as f64;
        let ((y0, s0), (y1, s1)) = (node(k), node(k + 1));
        let (m0, m1) = (s0 * h, s1 * h);
        let t2 = t * t;
        let t3 = t2 * t;
        (2.0 * t3 - 3.0 * t2 + 1.0) * y0 + (t3 - 2.0 * t2 + t) * m0 + (-2.0 * t3 + 3.0 * t2) * y1 + (t3 - t2) * m1
    }

    /// Decay rate of the tail model, `sqrt(lambda0)`.
    pub fn tail_rate(&self) -> f64 {
        self.lambda0.sqrt()
    }
}
