//! The scaled Laplacian `mu^{(N+2)/2} Delta v` split into `Delta_xi W`,
//! `mu^2 Delta_K W` and the correction operators `A_0 .. A_5`, acting on
//! `W(y, xi) = w0(xi) + L(y, xi)` with `L` zonal at every `y`.
//!
//! Coefficients are read off the second-order metric jet. The closure holds
//! when the normal data is isotropic: `H = diag(h_t, kappa Id)`, curvature of
//! constant normal type, `Gamma = 0` and constant `g~`. Any other geometry
//! gives a representation error. Everything of order `eps^3` except the
//! `A_5` drift, and the remainder `B(W)`, is dropped.

use num_traits::Float;
use crate::error::{Error, Result};
use crate::geometry::CurvatureData;
use crate::modes::{ModeContext, ModeFunction, ZonalNodes};
use crate::periodic::PeriodicGrid;
use alloc::format;
use alloc::sync::Arc;
use alloc::vec;
use alloc::vec::Vec;

pub const TRUNCATION: &str = "O(eps^3) terms except the A5 drift; B(W) remainder omitted";

/// Geometric coefficients at one sample, independent of `eps` and `mu`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PointCoefficients {
    /// `X_N` coefficient of `g^{ii}` (`2 kappa`).
    pub normal_h: f64,
    /// `X_N^2` coefficient of `g^{ii}` (`3 kappa^2`).
    pub normal_h2: f64,
    /// `g^{ij} ~ curvature (|X_bar|^2 delta_ij - X_i X_j)`.
    pub curvature: f64,
    /// `X_j` coefficient of the first-order drift `b^j`.
    pub drift: f64,
    /// `d_N log sqrt(det)` at `X = 0` (`-tr H`).
    pub mean: f64,
    /// `X_N` coefficient of `d_N log sqrt(det)` (`-tr H^2`).
    pub mean2: f64,
    /// `X_N` coefficient of the tangential drift `b^z`, over `eps^2`.
    pub tangential: f64,
    pub g_tilde: f64,
}

#[derive(Debug, Clone)]
pub struct OperatorBundle {
    pub grid: PeriodicGrid,
    pub coeffs: Vec<PointCoefficients>,
    pub truncation: &'static str,
}

/// A zonal function of `xi` at every sample of `y`.
#[derive(Debug, Clone)]
pub struct ZField {
    pub ctx: Arc<ModeContext>,
    pub slices: Vec<ModeFunction>,
}

impl ZField {
    pub fn zero(ctx: &Arc<ModeContext>, samples: usize, decay: f64) -> Self {
        let z = ModeFunction::radial(ctx, decay, vec![0.0; ctx.grid.len()]);
        Self { ctx: ctx.clone(), slices: vec![z; samples] }
    }

    pub fn len(&self) -> usize {
        self.slices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.slices.is_empty()
    }

    pub fn add_scaled(&mut self, other: &ZField, s: f64) {
        for (a, b) in self.slices.iter_mut().zip(&other.slices) {
            a.add_scaled(b, s);
        }
    }

    /// `d/dy` applied profile by profile through the periodic grid.
    pub fn y_derivative(&self, grid: &PeriodicGrid, order: usize) -> Result<ZField> {
        let m = self.len();
        let profiles: Vec<Vec<Vec<f64>>> = self.slices.iter().map(|s| s.zonal_profiles()).collect();
        if self.slices.iter().any(|s| !s.is_zonal()) {
            return Err(Error::Representation("y-derivative needs zonal slices".into()));
        }
        let d = if order == 1 { grid.d1() } else { grid.d2() };
        let nq = self.ctx.modes();
        let nr = self.ctx.grid.len();
        let mut out: Vec<Vec<Vec<f64>>> = vec![vec![vec![0.0; nr]; nq]; m];
        for q in 0..nq {
            for i in 0..nr {
                for j in 0..m {
                    let mut acc = 0.0;
                    for k in 0..m {
                        acc += d[j * m + k] * profiles[k][q][i];
                    }
                    out[j][q][i] = acc;
                }
            }
        }
        let slices = out
            .into_iter()
            .zip(&self.slices)
            .map(|(p, s)| {
                let mut f = ModeFunction::radial(&self.ctx, s.decay, vec![0.0; nr]);
                f.blocks[0].profiles = p;
                f
            })
            .collect();
        Ok(ZField { ctx: self.ctx.clone(), slices })
    }

    /// Largest weighted norm over the samples.
    pub fn weighted_norm(&self, eps: f64, rate: f64, delta: f64) -> f64 {
        self.slices.iter().map(|s| s.weighted_norm(eps, rate, delta)).fold(0.0, f64::max)
    }
}

fn spread(v: impl Iterator<Item = f64>) -> f64 {
    let (lo, hi) = v.fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), x| (a.min(x), b.max(x)));
    hi - lo
}

fn isotropy(cd: &CurvatureData, j: usize) -> Result<()> {
    let nn = cd.dim();
    let d = nn - 1;
    let h = |a: usize, b: usize| cd.h_at(j, a, b);
    let kappa = h(1, 1);
    let scale = 1.0 + kappa.abs() + h(0, 0).abs();
    let tol = 1e-12 * scale * scale;
    let fail = |what: &str| Err(Error::Representation(format!("operator closure needs isotropic normal data; {what} at y = {}", cd.grid.y[j])));
    for a in 0..nn {
        for b in 0..nn {
            let want = if a == b && a > 0 { kappa } else if a == 0 && b == 0 { h(0, 0) } else { 0.0 };
            if (h(a, b) - want).abs() > tol {
                return fail("shape operator not of the form diag(h_t, kappa Id)");
            }
        }
    }
    if cd.gamma[j].iter().any(|g| g.abs() > tol) {
        return fail("connection form nonzero");
    }
    let c_n = -cd.r_normal_at(j, 0, 1, 1, 0);
    for m in 0..d {
        for i in 0..d {
            for jj in 0..d {
                for l in 0..d {
                    let want = c_n * (((m == jj) && (i == l)) as u8 as f64 - ((m == l) && (i == jj)) as u8 as f64);
                    if (cd.r_normal_at(j, m, i, jj, l) - want).abs() > tol {
                        return fail("normal curvature not of constant type");
                    }
                }
            }
        }
    }
    let c_t = cd.r_mixed[j][0];
    for m in 0..d {
        for l in 0..d {
            let want = if m == l { c_t } else { 0.0 };
            if (cd.r_mixed[j][m * d + l] - want).abs() > tol {
                return fail("mixed curvature not a multiple of the identity");
            }
        }
    }
    Ok(())
}

impl OperatorBundle {
    pub fn new(cd: &CurvatureData) -> Result<Self> {
        if spread(cd.g_tilde.iter().copied()) > 1e-12 * cd.g_tilde[0] {
            return Err(Error::Representation("operator closure needs a constant induced metric".into()));
        }
        let nn = cd.dim();
        let m = nn + 1;
        let xn = nn - 1;
        let samples = cd.samples();
        let mut coeffs = Vec::with_capacity(samples);
        let mut tang_g = Vec::with_capacity(samples);
        let mut tang_l = Vec::with_capacity(samples);
        for j in 0..samples {
            isotropy(cd, j)?;
            // eps = 1: every coefficient below is the eps-free geometric factor
            let jet = cd.metric_jet(j, 1.0)?;
            let g11 = &jet.ginv[m + 1];
            let mut drift = jet.log_det.c2[0];
            for i in 1..nn {
                drift += 2.0 * jet.ginv[i * m + 1].c2[(i - 1) * nn];
            }
            coeffs.push(PointCoefficients {
                normal_h: g11.c1[xn],
                normal_h2: g11.c2[xn * nn + xn],
                curvature: g11.c2[nn + 1],
                drift,
                mean: 0.5 * jet.log_det.c1[xn],
                mean2: jet.log_det.c2[xn * nn + xn],
                tangential: 0.0,
                g_tilde: cd.g_tilde[j],
            });
            tang_g.push(jet.ginv[0].c1[xn]);
            tang_l.push(jet.log_det.c1[xn]);
        }
        let dg = cd.grid.derivative(&tang_g);
        let dl = cd.grid.derivative(&tang_l);
        for (j, c) in coeffs.iter_mut().enumerate() {
            c.tangential = dg[j] + 0.5 * dl[j] / c.g_tilde;
        }
        Ok(Self { grid: cd.grid.clone(), coeffs, truncation: TRUNCATION })
    }

    pub fn samples(&self) -> usize {
        self.coeffs.len()
    }

    fn mu_derivatives(&self, mu: &[f64]) -> (Vec<f64>, Vec<f64>) {
        (self.grid.derivative(mu), self.grid.second_derivative(mu))
    }

    /// `A_0 .. A_5` applied to `w0 + layers` at sample `j`, each projected on the modes.
    pub fn terms_at(&self, eps: f64, mu: &[f64], layers: &ZField, j: usize, include_w0: bool) -> Result<[ModeFunction; 6]> {
        let ly = layers.y_derivative(&self.grid, 1)?;
        let (my, myy) = self.mu_derivatives(mu);
        let ctx = &layers.ctx;
        let nodes = total_nodes(&layers.slices[j], include_w0)?;
        let ny = ly.slices[j].zonal_nodes()?;
        let nr = ctx.grid.len();
        let nt = ctx.rules[0].len();
        let mut vals = vec![vec![vec![0.0; nt]; nr]; 6];
        let pt = PointInputs { eps, mu: mu[j], my: my[j], myy: myy[j], c: self.coeffs[j], gamma: ctx.dims.half_nm2, n: ctx.dims.n() };
        for i in 1..nr {
            let r = ctx.grid.r[i];
            for k in 0..nt {
                let t = ctx.rules[0].t[k];
                let a = pt.terms(r, t, &nodes, &ny, i, k);
                for (v, ak) in vals.iter_mut().zip(a) {
                    v[i][k] = ak;
                }
            }
        }
        let decay = layers.slices[j].decay;
        let mut out = vals.iter().map(|v| ModeFunction::from_zonal_nodes(ctx, decay, v));
        Ok(core::array::from_fn(|_| out.next().unwrap()))
    }

    /// `E(W) = Delta W + mu^2 Delta_K W + sum A_l W - eps mu^2 W + |W|^{p-1} W`
    /// for `W = w0 + layers`, projected on the modes, at every sample.
    pub fn residual(&self, eps: f64, mu: &[f64], layers: &ZField) -> Result<Vec<ModeFunction>> {
        let ctx = &layers.ctx;
        let p = ctx.dims.p;
        let n = ctx.dims.n();
        let ly = layers.y_derivative(&self.grid, 1)?;
        let lyy = layers.y_derivative(&self.grid, 2)?;
        let (my, myy) = self.mu_derivatives(mu);
        let nr = ctx.grid.len();
        let nt = ctx.rules[0].len();
        let mut out = Vec::with_capacity(self.samples());
        for j in 0..self.samples() {
            let l = &layers.slices[j];
            let nodes = total_nodes(l, true)?;
            let ny = ly.slices[j].zonal_nodes()?;
            let pt = PointInputs { eps, mu: mu[j], my: my[j], myy: myy[j], c: self.coeffs[j], gamma: ctx.dims.half_nm2, n };
            let mut vals = vec![vec![0.0; nt]; nr];
            for i in 1..nr {
                let r = ctx.grid.r[i];
                let w0 = ctx.w[i];
                let w0p = w0.powf(p);
                for k in 0..nt {
                    let t = ctx.rules[0].t[k];
                    let a = pt.terms(r, t, &nodes, &ny, i, k);
                    let wv = nodes.f[i][k];
                    let nl = wv.abs().powf(p - 1.0) * wv - w0p;
                    vals[i][k] = a.iter().sum::<f64>() + nl - eps * pt.mu * pt.mu * w0;
                }
            }
            let mut e = ModeFunction::from_zonal_nodes(ctx, n - 2.0, &vals);
            // linear parts in coefficient space
            e.add_scaled(&l.laplacian(), 1.0);
            e.add_scaled(&lyy.slices[j], eps * eps * pt.mu * pt.mu / pt.c.g_tilde);
            e.add_scaled(l, -eps * pt.mu * pt.mu);
            e.decay = n - 2.0;
            out.push(e);
        }
        Ok(out)
    }
}

fn total_nodes(l: &ModeFunction, include_w0: bool) -> Result<ZonalNodes> {
    let mut nodes = l.zonal_nodes()?;
    if include_w0 {
        let ctx = &l.ctx;
        for i in 0..ctx.grid.len() {
            for k in 0..nodes.f[i].len() {
                nodes.f[i][k] += ctx.w[i];
                nodes.fr[i][k] += ctx.dw[i];
                nodes.frr[i][k] += ctx.d2w[i];
            }
        }
    }
    Ok(nodes)
}

struct PointInputs {
    eps: f64,
    mu: f64,
    my: f64,
    myy: f64,
    c: PointCoefficients,
    gamma: f64,
    n: f64,
}

impl PointInputs {
    /// The six correction terms at node `(r, t)`; `w` carries `W`, `wy` carries `W_y`.
    fn terms(&self, r: f64, t: f64, w: &ZonalNodes, wy: &ZonalNodes, i: usize, k: usize) -> [f64; 6] {
        let (f, fr, frr, ft, ftt, frt) = (w.f[i][k], w.fr[i][k], w.frr[i][k], w.ft[i][k], w.ftt[i][k], w.frt[i][k]);
        let (eps, mu, g) = (self.eps, self.mu, self.gamma);
        let c = &self.c;
        let s2 = 1.0 - t * t;
        let xn = r * t;
        let xb2 = r * r * s2;
        let d_n = t * fr + s2 * ft / r;
        let d_nn = t * t * frr + s2 * fr / r + 2.0 * t * s2 * frt / r + s2 * s2 * ftt / (r * r) - 3.0 * t * s2 * ft / (r * r);
        let lap = frr + (self.n - 1.0) * fr / r + (s2 * ftt - (self.n - 1.0) * t * ft) / (r * r);
        let lap_bar = lap - d_nn;
        let e1 = r * s2 * fr - t * s2 * ft;
        let gr = s2 * fr + r * s2 * frr - t * s2 * frt;
        let gt = -2.0 * t * r * fr + r * s2 * frt - (1.0 - 3.0 * t * t) * ft - t * s2 * ftt;
        let e2 = r * s2 * gr - t * s2 * gt - e1;
        let dil = g * f + r * fr;
        let dil2 = r * r * frr + 2.0 * (1.0 + g) * r * fr + g * (1.0 + g) * f;
        let (fy, fyr) = (wy.f[i][k], wy.fr[i][k]);
        let gi = 1.0 / c.g_tilde;
        let e2s = eps * eps;
        let a0 = gi * (-e2s * mu * self.myy * dil + e2s * self.my * self.my * dil2 - 2.0 * e2s * mu * self.my * (r * fyr + g * fy));
        let a1 = eps * mu * c.normal_h * xn * lap_bar
            + e2s * mu * mu * c.curvature * (xb2 * lap_bar - e2)
            + e2s * mu * mu * c.normal_h2 * xn * xn * lap_bar;
        let a2 = e2s * mu * mu * c.drift * e1;
        let a3 = mu * (eps * c.mean + e2s * mu * c.mean2 * xn) * d_n;
        let a5 = e2s * eps * mu * mu * c.tangential * xn * (mu * fy - self.my * dil);
        [a0, a1, a2, a3, 0.0, a5]
    }
}
