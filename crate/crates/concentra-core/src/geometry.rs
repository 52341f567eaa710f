//! Curvature data along a closed curve `K` in the boundary, sampled on a
//! uniform arclength grid, and the second-order jet of the metric in
//! Fermi coordinates around `K`.
//!
//! Frame convention: index 0 is the unit tangent of `K`, indices
//! `1..N-1` the normals of `K` inside the boundary. The shape operator uses
//! the inner normal, so the unit ball has `H = Id`. Curvature components
//! follow `R_abcd = H_ac H_bd - H_ad H_bc` for a round sphere.

use num_traits::Float;
use crate::error::{Error, Result};
use crate::periodic::PeriodicGrid;
use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;

/// `mean + sum_k cos[k-1] cos(2 pi k y / L) + sin[k-1] sin(2 pi k y / L)`.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct FourierSeries {
    pub mean: f64,
    pub cos: Vec<f64>,
    pub sin: Vec<f64>,
}

impl FourierSeries {
    pub fn constant(mean: f64) -> Self {
        Self { mean, ..Self::default() }
    }

    pub fn eval(&self, y: f64, length: f64) -> f64 {
        let w = 2.0 * PI / length;
        let mut v = self.mean;
        for (k, c) in self.cos.iter().enumerate() {
            v += c * (w * (k + 1) as f64 * y).cos();
        }
        for (k, s) in self.sin.iter().enumerate() {
            v += s * (w * (k + 1) as f64 * y).sin();
        }
        v
    }
}

/// One component of a synthetic field: frame indices and its series.
#[derive(Debug, Clone, PartialEq)]
pub struct FieldEntry {
    pub index: Vec<usize>,
    pub series: FourierSeries,
}

/// User-provided periodic curvature data.
///
/// `h` entries carry two frame indices (0 = tangent); `r` entries four, either
/// all normal (`R_istj`) or of the form `(m, 0, 0, l)`; `gamma` entries one
/// normal index `i` for `Gamma^1_{1i}`. Without `r` the curvature is taken
/// from `H` by the Gauss equation. Missing entries are zero.
#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticSpec {
    pub n: usize,
    pub length: f64,
    pub grid: usize,
    pub g_tilde: f64,
    pub h: Vec<FieldEntry>,
    pub r: Option<Vec<FieldEntry>>,
    pub gamma: Vec<FieldEntry>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum BuiltinGeometry {
    /// Great circle of the unit sphere.
    RoundSphere,
    /// Equator of `x1^2 + x2^2 + |z|^2 / aspect^2 = 1`.
    SpheroidEquator { aspect: f64 },
    /// `H = diag(h_t(y), 1, .., 1)` with `h_t = 1 + a + a/2 cos y`, `L = 2 pi`.
    PerturbedSphere { amplitude: f64 },
    Flat,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CurvatureData {
    /// Ambient dimension `n = N + 1`.
    pub n: usize,
    pub k: usize,
    pub grid: PeriodicGrid,
    /// Per sample, `N x N` row-major.
    pub h: Vec<Vec<f64>>,
    /// Per sample, `R_istj` over normal indices, `(N-1)^4` entries.
    pub r_normal: Vec<Vec<f64>>,
    /// Per sample, `R_m11l`, `(N-1)^2` entries.
    pub r_mixed: Vec<Vec<f64>>,
    /// Per sample, `Gamma^1_{1i}`, `N-1` entries.
    pub gamma: Vec<Vec<f64>>,
    pub g_tilde: Vec<f64>,
    pub label: String,
}

fn gauss_normal(h: &[f64], nn: usize) -> Vec<f64> {
    let d = nn - 1;
    let hh = |a: usize, b: usize| h[a * nn + b];
    let mut r = vec![0.0; d * d * d * d];
    for i in 0..d {
        for s in 0..d {
            for t in 0..d {
                for j in 0..d {
                    r[((i * d + s) * d + t) * d + j] = hh(i + 1, t + 1) * hh(s + 1, j + 1) - hh(i + 1, j + 1) * hh(s + 1, t + 1);
                }
            }
        }
    }
    r
}

fn gauss_mixed(h: &[f64], nn: usize) -> Vec<f64> {
    let d = nn - 1;
    let hh = |a: usize, b: usize| h[a * nn + b];
    let mut r = vec![0.0; d * d];
    for m in 0..d {
        for l in 0..d {
            r[m * d + l] = hh(m + 1, 0) * hh(0, l + 1) - hh(m + 1, l + 1) * hh(0, 0);
        }
    }
    r
}

impl CurvatureData {
    /// Builds data from a shape operator field, with curvature from the Gauss equation.
    pub fn from_shape_operator(n: usize, grid: PeriodicGrid, h: Vec<Vec<f64>>, gamma: Vec<Vec<f64>>, g_tilde: Vec<f64>, label: &str) -> Result<Self> {
        let nn = n - 1;
        let r_normal = h.iter().map(|hy| gauss_normal(hy, nn)).collect();
        let r_mixed = h.iter().map(|hy| gauss_mixed(hy, nn)).collect();
        let cd = Self { n, k: 1, grid, h, r_normal, r_mixed, gamma, g_tilde, label: label.into() };
        cd.validate()?;
        Ok(cd)
    }

    /// Transverse dimension `N = n - 1`.
    pub fn dim(&self) -> usize {
        self.n - 1
    }

    pub fn samples(&self) -> usize {
        self.grid.len()
    }

    pub fn length(&self) -> f64 {
        self.grid.length
    }

    pub fn h_at(&self, j: usize, a: usize, b: usize) -> f64 {
        self.h[j][a * self.dim() + b]
    }

    pub fn r_normal_at(&self, j: usize, i: usize, s: usize, t: usize, l: usize) -> f64 {
        let d = self.dim() - 1;
        self.r_normal[j][((i * d + s) * d + t) * d + l]
    }

    pub fn validate(&self) -> Result<()> {
        if self.n < 8 {
            return Err(Error::Validation(format!("N ≥ 7 required (ambient n = {} gives N = {})", self.n, self.n.saturating_sub(1))));
        }
        let nn = self.dim();
        let d = nn - 1;
        let m = self.samples();
        let lens_ok = self.h.len() == m
            && self.r_normal.len() == m
            && self.r_mixed.len() == m
            && self.gamma.len() == m
            && self.g_tilde.len() == m
            && self.h.iter().all(|v| v.len() == nn * nn)
            && self.r_normal.iter().all(|v| v.len() == d * d * d * d)
            && self.r_mixed.iter().all(|v| v.len() == d * d)
            && self.gamma.iter().all(|v| v.len() == d);
        if !lens_ok {
            return Err(Error::Validation("curvature field shapes do not match the dimension and grid".into()));
        }
        for j in 0..m {
            if !(self.g_tilde[j] > 0.0) {
                return Err(Error::Validation(format!("induced metric must be positive, got {} at y = {}", self.g_tilde[j], self.grid.y[j])));
            }
            let hy = &self.h[j];
            let scale = hy.iter().fold(1.0f64, |a, b| a.max(b.abs()));
            for a in 0..nn {
                for b in 0..a {
                    if (hy[a * nn + b] - hy[b * nn + a]).abs() > 1e-12 * scale {
                        return Err(Error::Validation(format!("shape operator not symmetric in ({a}, {b}) at y = {}", self.grid.y[j])));
                    }
                }
            }
            let mscale = self.r_mixed[j].iter().fold(1.0f64, |a, b| a.max(b.abs()));
            for a in 0..d {
                for b in 0..a {
                    if (self.r_mixed[j][a * d + b] - self.r_mixed[j][b * d + a]).abs() > 1e-12 * mscale {
                        return Err(Error::Validation(format!("R_m11l not symmetric in (m, l) = ({}, {}) at y = {}", a + 1, b + 1, self.grid.y[j])));
                    }
                }
            }
            let rscale = self.r_normal[j].iter().fold(1.0f64, |a, b| a.max(b.abs()));
            for i in 0..d {
                for s in 0..d {
                    for t in 0..d {
                        for l in 0..d {
                            let v = self.r_normal_at(j, i, s, t, l) + self.r_normal_at(j, s, i, t, l);
                            if v.abs() > 1e-12 * rscale {
                                return Err(Error::Validation(format!(
                                    "curvature not antisymmetric in its first pair: R_{{{}{}{}{}}} at y = {}",
                                    i + 1,
                                    s + 1,
                                    t + 1,
                                    l + 1,
                                    self.grid.y[j]
                                )));
                            }
                        }
                    }
                }
            }
        }
        // smoothness: every field's Fourier tail must be negligible
        let mut fields: Vec<(String, Vec<f64>)> = Vec::new();
        for a in 0..nn * nn {
            fields.push((format!("H[{a}]"), self.h.iter().map(|v| v[a]).collect()));
        }
        for a in 0..d * d {
            fields.push((format!("R_mixed[{a}]"), self.r_mixed.iter().map(|v| v[a]).collect()));
        }
        for a in 0..d {
            fields.push((format!("Gamma[{a}]"), self.gamma.iter().map(|v| v[a]).collect()));
        }
        for (name, f) in &fields {
            let tail = self.grid.spectral_tail(f);
            if tail > 1e-6 {
                return Err(Error::Validation(format!("field {name} is under-resolved on the grid (spectral tail {tail:e})")));
            }
        }
        Ok(())
    }

    /// `2 H_11 + sum_i H_ii` at sample `j`.
    pub fn hbar(&self, j: usize) -> f64 {
        let nn = self.dim();
        2.0 * self.h_at(j, 0, 0) + (1..nn).map(|i| self.h_at(j, i, i)).sum::<f64>()
    }

    /// The same quantity as `2 tr H - sum_i H_ii`.
    pub fn hbar_from_mean_curvature(&self, j: usize) -> f64 {
        let nn = self.dim();
        let tr: f64 = (0..nn).map(|a| self.h_at(j, a, a)).sum();
        2.0 * tr - (1..nn).map(|i| self.h_at(j, i, i)).sum::<f64>()
    }

    pub fn hbar_field(&self) -> Vec<f64> {
        (0..self.samples()).map(|j| self.hbar(j)).collect()
    }

    /// True when `hbar > 0` at every sample.
    pub fn positivity(&self) -> bool {
        self.hbar_field().iter().all(|v| *v > 0.0)
    }

    /// Positivity as a result carrying the worst sample.
    pub fn require_positive(&self) -> Result<()> {
        let f = self.hbar_field();
        let (j, v) = f.iter().enumerate().fold((0, f64::INFINITY), |(bj, bv), (j, v)| if *v < bv { (j, *v) } else { (bj, bv) });
        if v > 0.0 {
            Ok(())
        } else {
            Err(Error::Positivity { y: self.grid.y[j], value: v })
        }
    }

    /// `max_{y, i} |sum_a Gamma^a_a(E_i)|`; zero iff `K` is a geodesic.
    pub fn minimality_residual(&self) -> f64 {
        self.gamma.iter().flat_map(|g| g.iter()).fold(0.0f64, |m, v| m.max(v.abs()))
    }

    /// `R_ml = g^{11} R_m11l - Gamma_m Gamma_l` at sample `j`.
    pub fn jacobi_potential(&self, j: usize) -> Vec<f64> {
        let d = self.dim() - 1;
        let gi = 1.0 / self.g_tilde[j];
        let g = &self.gamma[j];
        let mut out = vec![0.0; d * d];
        for m in 0..d {
            for l in 0..d {
                out[m * d + l] = gi * self.r_mixed[j][m * d + l] - g[m] * g[l];
            }
        }
        out
    }

    /// Second-order metric jet at sample `j` for the scaled metric `g^eps`.
    pub fn metric_jet(&self, j: usize, eps: f64) -> Result<MetricJet> {
        if j >= self.samples() {
            return Err(Error::Domain(format!("sample index {j} outside grid of {}", self.samples())));
        }
        Ok(MetricJet::new(self, j, eps))
    }
}

fn periodic(n: usize, n_grid: usize, length: f64) -> Result<PeriodicGrid> {
    if n < 8 {
        return Err(Error::Validation(format!("N ≥ 7 required (ambient n = {n} gives N = {})", n.saturating_sub(1))));
    }
    PeriodicGrid::new(n_grid, length)
}

fn diag_h(nn: usize, t: f64, nrm: f64) -> Vec<f64> {
    let mut h = vec![0.0; nn * nn];
    h[0] = t;
    for i in 1..nn {
        h[i * nn + i] = nrm;
    }
    h
}

pub fn builtin_geometry(which: &BuiltinGeometry, n: usize, n_grid: usize) -> Result<CurvatureData> {
    let grid = periodic(n, n_grid, 2.0 * PI)?;
    let nn = n - 1;
    let m = grid.len();
    let zero_gamma = vec![vec![0.0; nn - 1]; m];
    let ones = vec![1.0; m];
    match which {
        BuiltinGeometry::RoundSphere => {
            let h = vec![diag_h(nn, 1.0, 1.0); m];
            CurvatureData::from_shape_operator(n, grid, h, zero_gamma, ones, "round_sphere")
        }
        BuiltinGeometry::SpheroidEquator { aspect } => {
            if !(*aspect > 0.0) {
                return Err(Error::Validation(format!("aspect must be positive, got {aspect}")));
            }
            // the equatorial ellipse x^2 + z^2/c^2 = 1 has curvature 1/c^2 at z = 0
            let h = vec![diag_h(nn, 1.0, 1.0 / (aspect * aspect)); m];
            CurvatureData::from_shape_operator(n, grid, h, zero_gamma, ones, "spheroid_equator")
        }
        BuiltinGeometry::PerturbedSphere { amplitude } => {
            let a = *amplitude;
            let h = grid.y.iter().map(|y| diag_h(nn, 1.0 + a + 0.5 * a * y.cos(), 1.0)).collect();
            CurvatureData::from_shape_operator(n, grid, h, zero_gamma, ones, "perturbed_sphere")
        }
        BuiltinGeometry::Flat => {
            let h = vec![vec![0.0; nn * nn]; m];
            CurvatureData::from_shape_operator(n, grid, h, zero_gamma, ones, "flat")
        }
    }
}

pub fn synthetic_geometry(spec: &SyntheticSpec) -> Result<CurvatureData> {
    let grid = periodic(spec.n, spec.grid, spec.length)?;
    let nn = spec.n - 1;
    let d = nn - 1;
    let m = grid.len();
    let len = spec.length;
    let mut h = vec![vec![0.0; nn * nn]; m];
    for e in &spec.h {
        if e.index.len() != 2 || e.index.iter().any(|&i| i >= nn) {
            return Err(Error::Validation(format!("shape operator entry {:?} needs two frame indices below {nn}", e.index)));
        }
        for (j, y) in grid.y.iter().enumerate() {
            h[j][e.index[0] * nn + e.index[1]] += e.series.eval(*y, len);
        }
    }
    let mut gamma = vec![vec![0.0; d]; m];
    for e in &spec.gamma {
        if e.index.len() != 1 || e.index[0] == 0 || e.index[0] > d {
            return Err(Error::Validation(format!("connection entry {:?} needs one normal index in 1..={d}", e.index)));
        }
        for (j, y) in grid.y.iter().enumerate() {
            gamma[j][e.index[0] - 1] += e.series.eval(*y, len);
        }
    }
    if !(spec.g_tilde > 0.0) {
        return Err(Error::Validation(format!("induced metric must be positive, got {}", spec.g_tilde)));
    }
    let g_tilde = vec![spec.g_tilde; m];
    let Some(rs) = &spec.r else {
        return CurvatureData::from_shape_operator(spec.n, grid, h, gamma, g_tilde, "synthetic");
    };
    let mut r_normal = vec![vec![0.0; d * d * d * d]; m];
    let mut r_mixed = vec![vec![0.0; d * d]; m];
    for e in rs {
        let ix = &e.index;
        if ix.len() != 4 || ix.iter().any(|&i| i >= nn) {
            return Err(Error::Validation(format!("curvature entry {:?} needs four frame indices below {nn}", ix)));
        }
        let all_normal = ix.iter().all(|&i| i >= 1);
        let mixed = ix[1] == 0 && ix[2] == 0 && ix[0] >= 1 && ix[3] >= 1;
        for (j, y) in grid.y.iter().enumerate() {
            let v = e.series.eval(*y, len);
            if all_normal {
                let (i, s, t, l) = (ix[0] - 1, ix[1] - 1, ix[2] - 1, ix[3] - 1);
                r_normal[j][((i * d + s) * d + t) * d + l] += v;
            } else if mixed {
                r_mixed[j][(ix[0] - 1) * d + ix[3] - 1] += v;
            } else {
                return Err(Error::Validation(format!("curvature entry {:?} is neither R_istj nor R_m11l", ix)));
            }
        }
    }
    let cd = CurvatureData { n: spec.n, k: 1, grid, h, r_normal, r_mixed, gamma, g_tilde, label: "synthetic".into() };
    cd.validate()?;
    Ok(cd)
}

/// A polynomial `c0 + c1 . X + X^T c2 X` in `X = (x_bar, x_N)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Jet2 {
    pub c0: f64,
    pub c1: Vec<f64>,
    /// Symmetric, row-major.
    pub c2: Vec<f64>,
}

impl Jet2 {
    pub fn constant(dim: usize, c: f64) -> Self {
        Self { c0: c, c1: vec![0.0; dim], c2: vec![0.0; dim * dim] }
    }

    pub fn dim(&self) -> usize {
        self.c1.len()
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        let d = self.dim();
        let mut v = self.c0;
        for i in 0..d {
            v += self.c1[i] * x[i];
            for j in 0..d {
                v += self.c2[i * d + j] * x[i] * x[j];
            }
        }
        v
    }

    pub fn add(&self, o: &Jet2, s: f64) -> Jet2 {
        Jet2 {
            c0: self.c0 + s * o.c0,
            c1: self.c1.iter().zip(&o.c1).map(|(a, b)| a + s * b).collect(),
            c2: self.c2.iter().zip(&o.c2).map(|(a, b)| a + s * b).collect(),
        }
    }

    pub fn scale(&self, s: f64) -> Jet2 {
        Jet2 { c0: s * self.c0, c1: self.c1.iter().map(|a| s * a).collect(), c2: self.c2.iter().map(|a| s * a).collect() }
    }

    /// Product truncated after second order.
    pub fn mul(&self, o: &Jet2) -> Jet2 {
        let d = self.dim();
        let mut c2 = vec![0.0; d * d];
        for i in 0..d {
            for j in 0..d {
                c2[i * d + j] = self.c0 * o.c2[i * d + j] + o.c0 * self.c2[i * d + j] + 0.5 * (self.c1[i] * o.c1[j] + self.c1[j] * o.c1[i]);
            }
        }
        Jet2 { c0: self.c0 * o.c0, c1: self.c1.iter().zip(&o.c1).map(|(a, b)| self.c0 * b + o.c0 * a).collect(), c2 }
    }

    /// `log` through second order; needs `c0 > 0`.
    pub fn ln(&self) -> Jet2 {
        let u = self.scale(1.0 / self.c0).add(&Jet2::constant(self.dim(), 1.0), -1.0);
        let mut out = u.add(&u.mul(&u), -0.5);
        out.c0 = self.c0.ln();
        out
    }

    /// `sqrt` through second order; needs `c0 > 0`.
    pub fn sqrt(&self) -> Jet2 {
        let s = self.c0.sqrt();
        let u = self.scale(1.0 / self.c0).add(&Jet2::constant(self.dim(), 1.0), -1.0);
        Jet2::constant(self.dim(), 1.0).add(&u, 0.5).add(&u.mul(&u), -0.125).scale(s)
    }

    /// Largest coefficient difference.
    pub fn distance(&self, o: &Jet2) -> f64 {
        let mut m = (self.c0 - o.c0).abs();
        for (a, b) in self.c1.iter().zip(&o.c1).chain(self.c2.iter().zip(&o.c2)) {
            m = m.max((a - b).abs());
        }
        m
    }
}

/// Second-order jet of `g^eps` in the coordinates `(z, X)`, `X = (x_bar, x_N)`.
/// Matrix index 0 is `z`, `1..N-1` are `x_bar`, `N` is `x_N`.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricJet {
    pub eps: f64,
    pub y: f64,
    pub dim: usize,
    pub g: Vec<Jet2>,
    pub ginv: Vec<Jet2>,
    pub sqrt_det: Jet2,
    pub log_det: Jet2,
    /// Terms of the metric left out: everything of order `eps^3 |X|^3`, and
    /// order-two parts of `g_aj`.
    pub truncation: &'static str,
}

fn matmul(a: &[Jet2], b: &[Jet2], m: usize) -> Vec<Jet2> {
    let d = a[0].dim();
    let mut out = vec![Jet2::constant(d, 0.0); m * m];
    for i in 0..m {
        for j in 0..m {
            let mut acc = Jet2::constant(d, 0.0);
            for k in 0..m {
                acc = acc.add(&a[i * m + k].mul(&b[k * m + j]), 1.0);
            }
            out[i * m + j] = acc;
        }
    }
    out
}

impl MetricJet {
    fn new(cd: &CurvatureData, j: usize, eps: f64) -> Self {
        let nn = cd.dim();
        let d = nn - 1;
        let m = nn + 1;
        let xn = nn - 1; // position of x_N inside X
        let gt = cd.g_tilde[j];
        let h = |a: usize, b: usize| cd.h_at(j, a, b);
        let h2 = |a: usize, b: usize| (0..nn).map(|c| h(a, c) * h(c, b)).sum::<f64>();
        let gam = &cd.gamma[j];
        let e2 = eps * eps;
        let mut g = vec![Jet2::constant(nn, 0.0); m * m];
        // g_ij, frame normals i, j -> matrix 1..N-1, X positions i-1
        for i in 1..nn {
            for jj in 1..nn {
                let e = &mut g[i * m + jj];
                e.c0 = if i == jj { 1.0 } else { 0.0 };
                e.c1[xn] = -2.0 * eps * h(i, jj);
                for s in 1..nn {
                    for t in 1..nn {
                        e.c2[(s - 1) * nn + (t - 1)] += e2 / 3.0 * cd.r_normal_at(j, i - 1, s - 1, t - 1, jj - 1);
                    }
                }
                e.c2[xn * nn + xn] += e2 * h2(i, jj);
            }
        }
        for jj in 1..nn {
            let v = -eps * (h(0, jj) + gt * h(0, jj));
            g[jj].c1[xn] = v;
            g[jj * m].c1[xn] = v;
        }
        {
            let e = &mut g[0];
            e.c0 = gt;
            for i in 0..d {
                e.c1[i] = -2.0 * eps * gt * gam[i];
            }
            e.c1[xn] = -2.0 * eps * h(0, 0) * gt;
            for s in 0..d {
                for l in 0..d {
                    e.c2[s * nn + l] += e2 * (cd.r_mixed[j][s * d + l] + gt * gam[s] * gam[l]);
                }
            }
            e.c2[xn * nn + xn] += e2 * h2(0, 0);
            for k in 0..d {
                let v = e2 * 4.0 * gt * h(0, 0) * gam[k];
                e.c2[xn * nn + k] += 0.5 * v;
                e.c2[k * nn + xn] += 0.5 * v;
            }
        }
        g[nn * m + nn].c0 = 1.0;
        // symmetrize the quadratic parts
        for e in g.iter_mut() {
            for a in 0..nn {
                for b in 0..a {
                    let v = 0.5 * (e.c2[a * nn + b] + e.c2[b * nn + a]);
                    e.c2[a * nn + b] = v;
                    e.c2[b * nn + a] = v;
                }
            }
        }
        // G0 is diagonal
        let g0inv: Vec<Jet2> = (0..m * m)
            .map(|k| Jet2::constant(nn, if k % (m + 1) == 0 { 1.0 / g[k].c0 } else { 0.0 }))
            .collect();
        let dg: Vec<Jet2> = g.iter().map(|e| Jet2 { c0: 0.0, ..e.clone() }).collect();
        let a = matmul(&g0inv, &dg, m);
        let aa = matmul(&a, &a, m);
        let mut ginv = Vec::with_capacity(m * m);
        let ag = matmul(&a, &g0inv, m);
        let aag = matmul(&aa, &g0inv, m);
        for k in 0..m * m {
            ginv.push(g0inv[k].add(&ag[k], -1.0).add(&aag[k], 1.0));
        }
        // log det = sum log G0_kk + tr(A) - tr(A^2)/2
        let mut log_det = Jet2::constant(nn, 0.0);
        for k in 0..m {
            log_det.c0 += g[k * m + k].c0.ln();
            log_det = log_det.add(&a[k * m + k], 1.0).add(&aa[k * m + k], -0.5);
        }
        let ld_half = log_det.add(&Jet2::constant(nn, log_det.c0), -1.0).scale(0.5);
        let sqrt_det = Jet2::constant(nn, 1.0).add(&ld_half, 1.0).add(&ld_half.mul(&ld_half), 0.5).scale((0.5 * log_det.c0).exp());
        Self { eps, y: cd.grid.y[j], dim: nn, g, ginv, sqrt_det, log_det, truncation: "O(eps^3 |X|^3); g_aj beyond first order" }
    }

    /// Metric matrix at `X`, row-major `(N+1) x (N+1)`.
    pub fn metric_at(&self, x: &[f64]) -> Vec<f64> {
        self.g.iter().map(|e| e.eval(x)).collect()
    }

    pub fn size(&self) -> usize {
        self.dim + 1
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::DMatrix;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn round_sphere_basics() {
        let cd = builtin_geometry(&BuiltinGeometry::RoundSphere, 8, 128).unwrap();
        assert_eq!(cd.minimality_residual(), 0.0);
        for j in 0..cd.samples() {
            assert_eq!(cd.hbar(j), 8.0);
            assert_eq!(cd.hbar_from_mean_curvature(j), 8.0);
        }
        assert!(cd.positivity());
        let p = cd.jacobi_potential(0);
        for m in 0..6 {
            for l in 0..6 {
                assert_eq!(p[m * 6 + l], if m == l { -1.0 } else { 0.0 });
            }
        }
    }

    #[test]
    fn flat_has_no_positivity() {
        let cd = builtin_geometry(&BuiltinGeometry::Flat, 8, 16).unwrap();
        assert_eq!(cd.hbar(3), 0.0);
        assert!(!cd.positivity());
        assert!(matches!(cd.require_positive(), Err(Error::Positivity { .. })));
    }

    #[test]
    fn tangential_curvature_counts_twice() {
        let mut h = vec![FieldEntry { index: vec![0, 0], series: FourierSeries::constant(2.0) }];
        for i in 1..7 {
            h.push(FieldEntry { index: vec![i, i], series: FourierSeries::constant(1.0) });
        }
        let spec = SyntheticSpec { n: 8, length: 2.0 * PI, grid: 16, g_tilde: 1.0, h, r: None, gamma: Vec::new() };
        let cd = synthetic_geometry(&spec).unwrap();
        assert_eq!(cd.hbar(0), 10.0);
    }

    #[test]
    fn spheroid_is_geodesic() {
        let cd = builtin_geometry(&BuiltinGeometry::SpheroidEquator { aspect: 2.0 }, 8, 32).unwrap();
        assert!(cd.minimality_residual() <= 1e-12);
        assert!((cd.hbar(0) - (2.0 + 6.0 / 4.0)).abs() < 1e-15);
    }

    #[test]
    fn synthetic_rejects_bad_curvature() {
        let r = vec![FieldEntry { index: vec![1, 1, 2, 3], series: FourierSeries::constant(0.5) }];
        let spec = SyntheticSpec { n: 8, length: 1.0, grid: 16, g_tilde: 1.0, h: Vec::new(), r: Some(r), gamma: Vec::new() };
        assert!(matches!(synthetic_geometry(&spec), Err(Error::Validation(_))));
        let h = vec![FieldEntry { index: vec![0, 1], series: FourierSeries::constant(0.5) }];
        let spec = SyntheticSpec { n: 8, length: 1.0, grid: 16, g_tilde: 1.0, h, r: None, gamma: Vec::new() };
        assert!(matches!(synthetic_geometry(&spec), Err(Error::Validation(_))));
    }

    #[test]
    fn synthetic_gamma_read_off() {
        let gamma = vec![FieldEntry { index: vec![1], series: FourierSeries::constant(0.3) }];
        let spec = SyntheticSpec { n: 8, length: 1.0, grid: 16, g_tilde: 1.0, h: Vec::new(), r: None, gamma };
        let cd = synthetic_geometry(&spec).unwrap();
        assert!((cd.minimality_residual() - 0.3).abs() < 1e-15);
    }

    #[test]
    fn small_dimension_rejected() {
        let e = builtin_geometry(&BuiltinGeometry::RoundSphere, 7, 16).unwrap_err();
        assert!(format!("{e}").contains("N ≥ 7 required"));
    }

    #[test]
    fn flat_jet_is_block_metric() {
        let cd = builtin_geometry(&BuiltinGeometry::Flat, 8, 16).unwrap();
        let jet = cd.metric_jet(0, 0.1).unwrap();
        let x = [0.1, -0.2, 0.3, 0.0, 0.1, 0.05, 0.2];
        let g = jet.metric_at(&x);
        for a in 0..8 {
            for b in 0..8 {
                assert_eq!(g[a * 8 + b], if a == b { 1.0 } else { 0.0 });
            }
        }
        assert_eq!(jet.sqrt_det.eval(&x), 1.0);
    }

    #[test]
    fn round_sphere_sqrt_det_normal_slope() {
        let cd = builtin_geometry(&BuiltinGeometry::RoundSphere, 8, 16).unwrap();
        let eps = 0.01;
        let jet = cd.metric_jet(0, eps).unwrap();
        assert!((jet.sqrt_det.c1[6] + eps * 7.0).abs() < 1e-15);
    }

    fn sample_geometries() -> Vec<CurvatureData> {
        let h = vec![
            FieldEntry { index: vec![0, 0], series: FourierSeries { mean: 1.0, cos: vec![0.2], sin: vec![] } },
            FieldEntry { index: vec![1, 1], series: FourierSeries::constant(0.7) },
            FieldEntry { index: vec![2, 2], series: FourierSeries { mean: 1.3, cos: vec![], sin: vec![0.1] } },
            FieldEntry { index: vec![1, 2], series: FourierSeries::constant(0.2) },
            FieldEntry { index: vec![2, 1], series: FourierSeries::constant(0.2) },
            FieldEntry { index: vec![0, 3], series: FourierSeries::constant(0.1) },
            FieldEntry { index: vec![3, 0], series: FourierSeries::constant(0.1) },
        ];
        let gamma = vec![FieldEntry { index: vec![2], series: FourierSeries { mean: 0.1, cos: vec![0.05], sin: vec![] } }];
        let spec = SyntheticSpec { n: 8, length: 2.0 * PI, grid: 16, g_tilde: 1.0, h, r: None, gamma };
        vec![
            synthetic_geometry(&spec).unwrap(),
            builtin_geometry(&BuiltinGeometry::PerturbedSphere { amplitude: 0.1 }, 8, 16).unwrap(),
        ]
    }

    #[test]
    fn determinant_matches_dense_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for cd in sample_geometries() {
            let eps = 0.01;
            let jet = cd.metric_jet(3, eps).unwrap();
            for _ in 0..10 {
                let mut x: Vec<f64> = (0..7).map(|_| rng.random_range(-1.0..1.0)).collect();
                let nx = x.iter().map(|v| v * v).sum::<f64>().sqrt();
                for v in x.iter_mut() {
                    *v *= 0.1 / nx;
                }
                let det = DMatrix::from_row_slice(8, 8, &jet.metric_at(&x)).determinant();
                let s = jet.sqrt_det.eval(&x);
                let bound = 50.0 * (eps * 0.1f64).powi(3);
                assert!((det - s * s).abs() <= bound, "{} vs {}", det, s * s);
            }
        }
    }

    #[test]
    fn inverse_and_log_consistency() {
        for cd in sample_geometries() {
            let jet = cd.metric_jet(5, 0.05).unwrap();
            let m = jet.size();
            let prod = matmul(&jet.ginv, &jet.g, m);
            for a in 0..m {
                for b in 0..m {
                    let want = Jet2::constant(7, if a == b { 1.0 } else { 0.0 });
                    assert!(prod[a * m + b].distance(&want) < 1e-14);
                }
            }
            let two_log = jet.sqrt_det.ln().scale(2.0);
            assert!(two_log.distance(&jet.log_det) < 1e-14);
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]
        #[test]
        fn jet_product_is_commutative(a in -1.0f64..1.0, b in -1.0f64..1.0, c in -1.0f64..1.0) {
            let mut p = Jet2::constant(3, a);
            p.c1[1] = b;
            p.c2[4] = c;
            let mut q = Jet2::constant(3, b);
            q.c1[0] = c;
            q.c2[0] = a;
            prop_assert!(p.mul(&q).distance(&q.mul(&p)) < 1e-15);
        }
    }
}
