//! Gegenbauer polynomials and the angular rule used to project functions of
//! `t = xi_N / |xi|` onto even zonal modes.

use crate::quadrature::gauss_legendre;
use alloc::vec;
use alloc::vec::Vec;
use num_traits::Float;

/// `C_0^a(t) ..= C_n^a(t)`.
pub fn gegenbauer(n: usize, a: f64, t: f64) -> Vec<f64> {
    let mut c = vec![0.0; n + 1];
    c[0] = 1.0;
    if n >= 1 {
        c[1] = 2.0 * a * t;
    }
    for k in 2..=n {
        let kf = k as f64;
        c[k] = (2.0 * t * (kf + a - 1.0) * c[k - 1] - (kf + 2.0 * a - 2.0) * c[k - 2]) / kf;
    }
    c
}

/// `int_{-1}^1 (C_n^a)^2 (1-t^2)^{a-1/2} dt`.
pub fn gegenbauer_norm(n: usize, a: f64) -> f64 {
    let nf = n as f64;
    let lg = libm::lgamma(nf + 2.0 * a) - libm::lgamma(nf + 1.0) - 2.0 * libm::lgamma(a);
    core::f64::consts::PI * 2f64.powf(1.0 - 2.0 * a) * lg.exp() / (nf + a)
}

/// Nodes in `t in (0, 1)` with the even-extension weights of the measure
/// `(1-t^2)^{a-1/2} dt` on `[-1, 1]`, plus tabulated `C_j`, `C_j'`, `C_j''`
/// for even `j <= j_max`.
#[derive(Debug, Clone)]
pub struct AngularRule {
    pub alpha: f64,
    pub j_max: usize,
    pub t: Vec<f64>,
    pub weights: Vec<f64>,
    /// `c[k][q]` is `C_{2q}(t_k)`.
    pub c: Vec<Vec<f64>>,
    pub dc: Vec<Vec<f64>>,
    pub d2c: Vec<Vec<f64>>,
    /// Squared norms of `C_{2q}`.
    pub norms: Vec<f64>,
}

impl AngularRule {
    pub fn new(alpha: f64, j_max: usize, nodes: usize) -> Self {
        let (x, w) = gauss_legendre(nodes);
        let half = core::f64::consts::FRAC_PI_4;
        let nq = j_max / 2 + 1;
        let mut t = Vec::with_capacity(nodes);
        let mut weights = Vec::with_capacity(nodes);
        let (mut c, mut dc, mut d2c) = (Vec::new(), Vec::new(), Vec::new());
        for (xi, wi) in x.iter().zip(&w) {
            // theta in (0, pi/2), t = cos(theta), dt-measure becomes sin^{2a}
            let th = half * (xi + 1.0);
            let tk = th.cos();
            t.push(tk);
            weights.push(2.0 * half * wi * th.sin().powf(2.0 * alpha));
            let c0 = gegenbauer(j_max, alpha, tk);
            let c1 = gegenbauer(j_max, alpha + 1.0, tk);
            let c2 = gegenbauer(j_max, alpha + 2.0, tk);
            let mut row = vec![0.0; nq];
            let mut drow = vec![0.0; nq];
            let mut d2row = vec![0.0; nq];
            for q in 0..nq {
                let j = 2 * q;
                row[q] = c0[j];
                if j >= 1 {
                    drow[q] = 2.0 * alpha * c1[j - 1];
                }
                if j >= 2 {
                    d2row[q] = 4.0 * alpha * (alpha + 1.0) * c2[j - 2];
                }
            }
            c.push(row);
            dc.push(drow);
            d2c.push(d2row);
        }
        let norms = (0..nq).map(|q| gegenbauer_norm(2 * q, alpha)).collect();
        Self { alpha, j_max, t, weights, c, dc, d2c, norms }
    }

    pub fn len(&self) -> usize {
        self.t.len()
    }

    pub fn is_empty(&self) -> bool {
        self.t.is_empty()
    }

    pub fn modes(&self) -> usize {
        self.norms.len()
    }

    /// Even-mode coefficients of node values `f(t_k)`.
    pub fn project(&self, f: &[f64], out: &mut [f64]) {
        for (q, o) in out.iter_mut().enumerate() {
            let mut s = 0.0;
            for k in 0..f.len() {
                s += self.weights[k] * f[k] * self.c[k][q];
            }
            *o = s / self.norms[q];
        }
    }

    /// `sum_q coef[q] * table[k][q]` at every node.
    pub fn synthesize(table: &[Vec<f64>], coef: &[f64], out: &mut [f64]) {
        for (k, o) in out.iter_mut().enumerate() {
            *o = table[k].iter().zip(coef).map(|(a, b)| a * b).sum();
        }
    }

    /// Value of the expansion at an arbitrary `t`.
    pub fn eval(&self, coef: &[f64], t: f64) -> f64 {
        let c = gegenbauer(2 * (coef.len() - 1), self.alpha, t);
        coef.iter().enumerate().map(|(q, a)| a * c[2 * q]).sum()
    }
}
