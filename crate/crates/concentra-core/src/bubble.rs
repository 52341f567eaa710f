//! The standard bubble `w0(x) = alpha (1 + |x|^2)^{-(N-2)/2}` and its kernel.

use num_traits::Float;
use crate::error::{Error, Result};
use alloc::format;

/// Dimension data. `dim` is the transverse dimension N = n - k.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DimensionParams {
    pub dim: usize,
    pub k: usize,
    /// Critical exponent (N+2)/(N-2).
    pub p: f64,
    /// (N(N-2))^{(N-2)/4}.
    pub alpha: f64,
    /// (N-2)/2.
    pub half_nm2: f64,
}

impl DimensionParams {
    pub fn new(dim: usize) -> Result<Self> {
        if dim < 7 {
            return Err(Error::Validation(format!("N ≥ 7 required (got N = {dim})")));
        }
        let n = dim as f64;
        Ok(Self {
            dim,
            k: 1,
            p: (n + 2.0) / (n - 2.0),
            alpha: (n * (n - 2.0)).powf((n - 2.0) / 4.0),
            half_nm2: (n - 2.0) / 2.0,
        })
    }

    pub fn n(&self) -> f64 {
        self.dim as f64
    }
}

/// Closed forms of the bubble, its derivatives and the kernel `Z_0..Z_{N-1}`.
///
/// Radial functions take `r = |xi|`; point functions take a slice of length N.
#[derive(Debug, Clone, Copy)]
pub struct Bubble {
    pub dims: DimensionParams,
}

impl Bubble {
    pub fn new(dims: DimensionParams) -> Self {
        Self { dims }
    }

    pub fn w(&self, r: f64) -> f64 {
        self.dims.alpha * (1.0 + r * r).powf(-self.dims.half_nm2)
    }

    pub fn dw(&self, r: f64) -> f64 {
        let g = self.dims.half_nm2;
        -2.0 * g * self.dims.alpha * r * (1.0 + r * r).powf(-g - 1.0)
    }

    pub fn d2w(&self, r: f64) -> f64 {
        let g = self.dims.half_nm2;
        let s = 1.0 + r * r;
        -2.0 * g * self.dims.alpha * s.powf(-g - 2.0) * (1.0 - (2.0 * g + 1.0) * r * r)
    }

    /// `w'(r)/r`, finite at the origin.
    pub fn dw_over_r(&self, r: f64) -> f64 {
        let g = self.dims.half_nm2;
        -2.0 * g * self.dims.alpha * (1.0 + r * r).powf(-g - 1.0)
    }

    /// `w^p`.
    pub fn wp(&self, r: f64) -> f64 {
        let n = self.dims.n();
        self.dims.alpha.powf(self.dims.p) * (1.0 + r * r).powf(-(n + 2.0) / 2.0)
    }

    /// `p w^{p-1}`, which simplifies to `p N (N-2) / (1+r^2)^2`.
    pub fn potential(&self, r: f64) -> f64 {
        let n = self.dims.n();
        let s = 1.0 + r * r;
        self.dims.p * n * (n - 2.0) / (s * s)
    }

    /// Radial profile of `Z_0 = xi . grad w0 + (N-2)/2 w0`.
    pub fn z0(&self, r: f64) -> f64 {
        let g = self.dims.half_nm2;
        g * self.dims.alpha * (1.0 - r * r) * (1.0 + r * r).powf(-g - 1.0)
    }

    pub fn dz0(&self, r: f64) -> f64 {
        let g = self.dims.half_nm2;
        let s = 1.0 + r * r;
        -2.0 * g * self.dims.alpha * r * s.powf(-g - 2.0) * (s + (g + 1.0) * (1.0 - r * r))
    }

    pub fn d2z0(&self, r: f64) -> f64 {
        // derivative of -2 g alpha r s^{-g-2} q(r), q = s + (g+1)(1-r^2) = (g+2) - g r^2
        let g = self.dims.half_nm2;
        let s = 1.0 + r * r;
        let q = (g + 2.0) - g * r * r;
        let dq = -2.0 * g * r;
        let c = -2.0 * g * self.dims.alpha;
        c * (s.powf(-g - 2.0) * q + r * (-g - 2.0) * 2.0 * r * s.powf(-g - 3.0) * q + r * s.powf(-g - 2.0) * dq)
    }

    pub fn w0(&self, xi: &[f64]) -> f64 {
        self.w(norm(xi))
    }

    pub fn grad_w0(&self, xi: &[f64], out: &mut [f64]) {
        let c = self.dw_over_r(norm(xi));
        for (o, x) in out.iter_mut().zip(xi) {
            *o = c * x;
        }
    }

    /// Hessian, row-major `N x N`.
    pub fn hess_w0(&self, xi: &[f64], out: &mut [f64]) {
        let n = xi.len();
        let g = self.dims.half_nm2;
        let s = 1.0 + dot(xi, xi);
        let a = -2.0 * g * self.dims.alpha * s.powf(-g - 1.0);
        let b = 4.0 * g * (g + 1.0) * self.dims.alpha * s.powf(-g - 2.0);
        for i in 0..n {
            for j in 0..n {
                out[i * n + j] = b * xi[i] * xi[j] + if i == j { a } else { 0.0 };
            }
        }
    }

    /// `Z_j(xi)`: the dilation generator for `j = 0`, `d w0 / d xi_j` otherwise.
    pub fn kernel(&self, j: usize, xi: &[f64]) -> Result<f64> {
        if j >= self.dims.dim || xi.len() != self.dims.dim {
            return Err(Error::Domain(format!(
                "kernel index {j} out of range 0..{} (point of length {})",
                self.dims.dim,
                xi.len()
            )));
        }
        let r = norm(xi);
        Ok(if j == 0 { self.z0(r) } else { self.dw_over_r(r) * xi[j - 1] })
    }
}

/// `mu^{-(N-2)/2} w0(xi / mu)`.
pub fn eval_bubble(b: &Bubble, xi: &[f64], mu: f64) -> Result<f64> {
    if !(mu > 0.0) {
        return Err(Error::Domain(format!("scale must be positive, got {mu}")));
    }
    let r = norm(xi) / mu;
    Ok(mu.powf(-b.dims.half_nm2) * b.w(r))
}

pub fn eval_kernel(b: &Bubble, j: usize, xi: &[f64]) -> Result<f64> {
    b.kernel(j, xi)
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub(crate) fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}
