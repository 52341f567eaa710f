//! The approximate solution `W = w0 + w_1 + ... + w_{I+1}` with concentration
//! scale `mu = mu_0 + ... + mu_I` and normal shift `Phi_1 + ... + Phi_I`,
//! built layer by layer from the kernel projection conditions.

use num_traits::Float;
use crate::bubble::Bubble;
use crate::constants::ConstantsTable;
use crate::error::{Error, Result};
use crate::geometry::CurvatureData;
use crate::jacobi::JacobiOperator;
use crate::laplacian::{OperatorBundle, ZField};
use crate::modes::{Harmonic, KernelProjections, ModeContext, ModeFunction};
use crate::quadrature::{quad_halfspace, HalfspaceIntegrand, QuadOptions, Term};
use crate::solver::{solve_linearized, SolveDiagnostics, SolveOptions};
use alloc::format;
use alloc::sync::Arc;
use alloc::vec;
use alloc::vec::Vec;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExpansionOptions {
    pub order: usize,
    pub solve: SolveOptions,
    /// Target for `max_y |int E Z_0|` after the `mu` step.
    pub newton_tol: f64,
    pub newton_max: usize,
    /// `delta` of the weighted norms.
    pub delta: f64,
}

impl Default for ExpansionOptions {
    fn default() -> Self {
        Self { order: 1, solve: SolveOptions::default(), newton_tol: 1e-9, newton_max: 40, delta: 1.0 }
    }
}

/// Layer sizes recorded while building.
#[derive(Debug, Clone, PartialEq)]
pub struct LayerNorms {
    /// `||w_k||_{eps, N-4}` for `k = 1 ..= I + 1`.
    pub w: Vec<f64>,
    /// `sup |mu_i|` for `i = 1 ..= I`.
    pub mu: Vec<f64>,
    /// `sup |Phi_i| + sup |Phi_i'| + sup |Phi_i''|` for `i = 1 ..= I`.
    pub phi: Vec<f64>,
    /// `max_y |int E Z_0|` reached by each `mu` step.
    pub z0_after_mu: Vec<f64>,
    /// `max_y max_l |int E Z_l|` before each `Phi` step.
    pub zl_before_phi: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct ExpansionState {
    pub order: usize,
    pub eps: f64,
    pub cd: CurvatureData,
    pub ctx: Arc<ModeContext>,
    /// `mu_0, mu_1, ..., mu_I` sampled on the curve grid.
    pub mu_layers: Vec<Vec<f64>>,
    /// `Phi_1 .. Phi_I`, component-major sections.
    pub phi_layers: Vec<Vec<f64>>,
    /// `w_1 .. w_{I+1}`; `w0` is implicit.
    pub w_layers: Vec<ZField>,
    pub norms: LayerNorms,
    pub diagnostics: Vec<Vec<SolveDiagnostics>>,
    pub delta: f64,
}

impl ExpansionState {
    pub fn mu_total(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.cd.samples()];
        for l in &self.mu_layers {
            for (o, v) in out.iter_mut().zip(l) {
                *o += v;
            }
        }
        out
    }

    pub fn phi_total(&self) -> Vec<f64> {
        let mut out = vec![0.0; (self.cd.dim() - 1) * self.cd.samples()];
        for l in &self.phi_layers {
            for (o, v) in out.iter_mut().zip(l) {
                *o += v;
            }
        }
        out
    }

    pub fn w_total(&self) -> ZField {
        let mut out = ZField::zero(&self.ctx, self.cd.samples(), self.ctx.dims.n() - 2.0);
        for l in &self.w_layers {
            out.add_scaled(l, 1.0);
        }
        out
    }
}

/// `mu_0 = A_1 (2 H_00 + sum_i H_ii) / int w0^2` at every sample.
pub fn mu0_field(cd: &CurvatureData, ct: &ConstantsTable) -> Result<Vec<f64>> {
    let mu: Vec<f64> = cd.hbar_field().iter().map(|h| ct.a1_frak * h / ct.b).collect();
    let (j, v) = mu.iter().enumerate().fold((0, f64::INFINITY), |(bj, bv), (j, v)| if *v < bv { (j, *v) } else { (bj, bv) });
    if !(v > 0.0) {
        return Err(Error::Positivity { y: cd.grid.y[j], value: v });
    }
    Ok(mu)
}

struct NormalTraces {
    full: f64,
    normal: f64,
    /// Traceless part of the normal block, row-major.
    traceless: Vec<f64>,
}

fn traces(cd: &CurvatureData, j: usize) -> NormalTraces {
    let nn = cd.dim();
    let d = nn - 1;
    let full: f64 = (0..nn).map(|a| cd.h_at(j, a, a)).sum();
    let normal: f64 = (1..nn).map(|i| cd.h_at(j, i, i)).sum();
    let mut traceless = vec![0.0; d * d];
    for i in 0..d {
        for k in 0..d {
            traceless[i * d + k] = cd.h_at(j, i + 1, k + 1) - if i == k { normal / d as f64 } else { 0.0 };
        }
    }
    NormalTraces { full, normal, traceless }
}

/// `g_1 = mu_0 [-tr H d_N w0 + 2 xi_N H_ij d_ij w0 - mu_0 w0]` at sample `j`.
pub fn rhs_g1(ctx: &Arc<ModeContext>, cd: &CurvatureData, mu0: f64, j: usize) -> Result<ModeFunction> {
    let tr = traces(cd, j);
    let d = (cd.dim() - 1) as f64;
    let b = ctx.bubble;
    let n = ctx.dims.n();
    let mut g = ModeFunction::from_fn(ctx, Harmonic::Radial, n - 2.0, |r, t| {
        let (w1, w2) = (b.dw(r), b.d2w(r));
        mu0 * (-tr.full * w1 * t + 2.0 * r * t * (w1 / r * tr.normal + (w2 - w1 / r) * (1.0 - t * t) * tr.normal / d) - mu0 * b.w(r))
    })?;
    let scale = tr.traceless.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if scale > 1e-14 * (1.0 + tr.normal.abs()) {
        let q = ModeFunction::from_fn(ctx, Harmonic::Quadratic(tr.traceless.clone()), n - 2.0, |r, t| {
            2.0 * mu0 * t * r * (b.d2w(r) - b.dw(r) / r)
        })?;
        g.add_scaled(&q, 1.0);
    }
    Ok(g)
}

/// Kernel projections of `g_1` at sample `j` by quadrature of the closed form.
pub fn g1_projections(bubble: &Bubble, cd: &CurvatureData, mu0: f64, j: usize, opts: &QuadOptions) -> Result<KernelProjections> {
    let n = bubble.dims.dim;
    let d = n - 1;
    let last = n - 1;
    let tr = traces(cd, j);
    let b = *bubble;
    // the mass term w0 Z_0 decays one order slower than the rest
    let decay = 2.0 * n as f64 - 3.0;
    let mass_decay = |extra: Option<usize>| if extra.is_none() { decay - 1.0 } else { decay };
    // the projections nearly cancel; tolerate errors relative to the mass term
    let mass = quad_halfspace(&HalfspaceIntegrand::new(n, decay - 1.0).push(Term::axis(n, &[], move |r| mu0 * mu0 * b.w(r) * b.z0(r))), opts)?.value;
    let o = QuadOptions { abs_tol: opts.abs_tol.max(opts.rel_tol * mass.abs()), ..*opts };
    // g1 * k, with k = Z_0 (extra = None) or k = d_l w0 (extra = Some(l))
    let project = |extra: Option<usize>| -> Result<f64> {
        let kern = move |r: f64| match extra {
            None => b.z0(r),
            Some(_) => b.dw(r),
        };
        let with = |p: &[(usize, u32)]| {
            let mut v = p.to_vec();
            if let Some(l) = extra {
                v.push((l, 1));
            }
            v
        };
        let m = HalfspaceIntegrand::new(n, mass_decay(extra)).push(Term::axis(n, &with(&[]), move |r| -mu0 * mu0 * b.w(r) * kern(r)));
        let mut f = HalfspaceIntegrand::new(n, decay)
            .push(Term::axis(n, &with(&[(last, 1)]), move |r| -mu0 * tr.full * b.dw(r) * kern(r)))
            .push(Term::axis(n, &with(&[(last, 1)]), move |r| 2.0 * mu0 * tr.normal * b.dw(r) * kern(r)));
        for i in 0..d {
            for k in 0..d {
                let h = cd.h_at(j, i + 1, k + 1);
                if h != 0.0 {
                    f = f.push(Term::axis(n, &with(&[(i, 1), (k, 1), (last, 1)]), move |r| {
                        2.0 * mu0 * h * r * (b.d2w(r) - b.dw(r) / r) * kern(r)
                    }));
                }
            }
        }
        Ok(quad_halfspace(&m, &o)?.value + quad_halfspace(&f, &o)?.value)
    };
    let z0 = project(None)?;
    let zl = (0..d).map(|l| project(Some(l))).collect::<Result<Vec<_>>>()?;
    Ok(KernelProjections { z0, zl, z: f64::NAN })
}

/// `w_1 = solve(eps g_1, a = mu_0^2)` at every sample.
pub fn solve_order1(ctx: &Arc<ModeContext>, cd: &CurvatureData, mu0: &[f64], eps: f64, opts: &SolveOptions) -> Result<(ZField, Vec<SolveDiagnostics>)> {
    let mut slices = Vec::with_capacity(mu0.len());
    let mut diags = Vec::with_capacity(mu0.len());
    for (j, m) in mu0.iter().enumerate() {
        let g = rhs_g1(ctx, cd, *m, j)?.scaled(eps);
        let (w, dg) = solve_linearized(&g, eps, m * m, opts)?;
        slices.push(w);
        diags.push(dg);
    }
    Ok((ZField { ctx: ctx.clone(), slices }, diags))
}

fn sum_fields(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x + y).collect()
}

fn max_abs(v: impl IntoIterator<Item = f64>) -> f64 {
    v.into_iter().fold(0.0, |m, x| m.max(x.abs()))
}

/// `mu_i` making the `Z_0` projection of `E(W; mu + mu_i)` vanish at every
/// sample. Newton iteration with the local slope from a uniform shift of
/// `mu`, which leaves `mu'` unchanged. Returns the layer and the largest
/// remaining projection.
pub fn project_mu_step(ob: &OperatorBundle, eps: f64, mu: &[f64], w: &ZField, opts: &ExpansionOptions) -> Result<(Vec<f64>, f64)> {
    let m = mu.len();
    let z0 = |add: &[f64]| -> Result<Vec<f64>> {
        Ok(ob.residual(eps, &sum_fields(mu, add), w)?.iter().map(|e| e.project_kernel().z0).collect())
    };
    let h = 1e-5 * max_abs(mu.iter().copied());
    let mut step = vec![0.0; m];
    let mut f = z0(&step)?;
    let mut best = max_abs(f.iter().copied());
    for _ in 0..opts.newton_max {
        if best <= opts.newton_tol {
            break;
        }
        let shifted: Vec<f64> = step.iter().map(|s| s + h).collect();
        let fs = z0(&shifted)?;
        let trial: Vec<f64> = (0..m).map(|j| step[j] - f[j] * h / (fs[j] - f[j])).collect();
        if let Some(j) = (0..m).find(|&j| !(mu[j] + trial[j] > 0.0)) {
            return Err(Error::Numerical(format!(
                "no positive concentration scale near y = {}: eps = {eps} is outside the asymptotic range",
                ob.grid.y[j]
            )));
        }
        let ft = z0(&trial)?;
        let size = max_abs(ft.iter().copied());
        if size >= best {
            // stagnated at the rounding floor of the projection
            break;
        }
        step = trial;
        f = ft;
        best = size;
    }
    if !best.is_finite() {
        return Err(Error::Numerical("mu iteration diverged".into()));
    }
    Ok((step, best))
}

/// `Phi_i` from the `Z_l` projections `G` of the residual:
/// `s (-Phi''/g + R Phi) = -G / eps^2` with `s = int |d_1 w0|^2`.
pub fn project_phi_step(jac: &JacobiOperator, residual: &[ModeFunction], eps: f64, c0: f64) -> Result<(Vec<f64>, f64)> {
    let samples = residual.len();
    let d = jac.components;
    let mut g = vec![0.0; d * samples];
    for (j, e) in residual.iter().enumerate() {
        let p = e.project_kernel();
        for (l, v) in p.zl.iter().enumerate() {
            g[l * samples + j] = -v / (eps * eps * c0);
        }
    }
    let size = max_abs(g.iter().map(|v| v * eps * eps * c0));
    Ok((jac.solve(&g)?, size))
}

fn section_norm(cd: &CurvatureData, phi: &[f64]) -> f64 {
    let m = cd.samples();
    phi.chunks(m)
        .map(|c| max_abs(c.iter().copied()) + max_abs(cd.grid.derivative(c)) + max_abs(cd.grid.second_derivative(c)))
        .fold(0.0, f64::max)
}

/// Builds the expansion through order `opts.order` at the given `eps`.
pub fn build_expansion(ctx: &Arc<ModeContext>, cd: &CurvatureData, ct: &ConstantsTable, eps: f64, opts: &ExpansionOptions) -> Result<ExpansionState> {
    if !(eps > 0.0) {
        return Err(Error::Domain(format!("eps must be positive, got {eps}")));
    }
    let rate = ctx.dims.n() - 4.0;
    let mu0 = mu0_field(cd, ct)?;
    let (w1, d1) = solve_order1(ctx, cd, &mu0, eps, &opts.solve).map_err(|e| e.in_layer(1))?;
    let mut state = ExpansionState {
        order: opts.order,
        eps,
        cd: cd.clone(),
        ctx: ctx.clone(),
        mu_layers: vec![mu0.clone()],
        phi_layers: Vec::new(),
        norms: LayerNorms {
            w: vec![w1.weighted_norm(eps, rate, opts.delta)],
            mu: Vec::new(),
            phi: Vec::new(),
            z0_after_mu: Vec::new(),
            zl_before_phi: Vec::new(),
        },
        w_layers: vec![w1],
        diagnostics: vec![d1],
        delta: opts.delta,
    };
    if opts.order == 0 {
        return Ok(state);
    }
    let ob = OperatorBundle::new(cd).map_err(|e| e.in_layer(1))?;
    let jac = JacobiOperator::new(cd)?;
    for i in 1..=opts.order {
        let layer = |e: Error| e.in_layer(i);
        let w = state.w_total();
        let (mu_i, z0_left) = project_mu_step(&ob, eps, &state.mu_total(), &w, opts).map_err(layer)?;
        state.norms.mu.push(max_abs(mu_i.iter().copied()));
        state.norms.z0_after_mu.push(z0_left);
        state.mu_layers.push(mu_i);
        let mu = state.mu_total();
        if let Some((j, v)) = mu.iter().enumerate().find(|(_, v)| !(**v > 0.0)) {
            return Err(Error::Positivity { y: cd.grid.y[j], value: *v }.in_layer(i));
        }
        let e = ob.residual(eps, &mu, &w).map_err(layer)?;
        let (phi, g_size) = project_phi_step(&jac, &e, eps, ct.c0).map_err(layer)?;
        state.norms.zl_before_phi.push(g_size);
        if max_abs(phi.iter().copied()) > 0.0 {
            // a nonzero shift would leave the zonal representation
            return Err(Error::Representation(format!("normal shift of size {:e} is not representable", max_abs(phi.iter().copied()))).in_layer(i));
        }
        state.norms.phi.push(section_norm(cd, &phi));
        state.phi_layers.push(phi);
        let mut slices = Vec::with_capacity(e.len());
        let mut diags = Vec::with_capacity(e.len());
        for (j, ej) in e.iter().enumerate() {
            let (wn, dg) = solve_linearized(ej, eps, mu0[j] * mu0[j], &opts.solve).map_err(|er| er.in_layer(i + 1))?;
            slices.push(wn);
            diags.push(dg);
        }
        let wn = ZField { ctx: ctx.clone(), slices };
        state.norms.w.push(wn.weighted_norm(eps, rate, opts.delta));
        state.w_layers.push(wn);
        state.diagnostics.push(diags);
    }
    Ok(state)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ResidualReport {
    /// `max_y ||E(y, .)||_{eps, N-2}`.
    pub norm: f64,
    pub per_y: Vec<f64>,
    pub truncation: &'static str,
}

/// `E` of an arbitrary state (`mu` and the layer sum given directly).
pub fn residual_of(cd: &CurvatureData, eps: f64, mu: &[f64], w: &ZField, delta: f64) -> Result<ResidualReport> {
    let ob = OperatorBundle::new(cd)?;
    let rate = w.ctx.dims.n() - 2.0;
    let e = ob.residual(eps, mu, w)?;
    let per_y: Vec<f64> = e.iter().map(|f| f.weighted_norm(eps, rate, delta)).collect();
    Ok(ResidualReport { norm: per_y.iter().copied().fold(0.0, f64::max), per_y, truncation: ob.truncation })
}

pub fn residual(state: &ExpansionState) -> Result<ResidualReport> {
    residual_of(&state.cd, state.eps, &state.mu_total(), &state.w_total(), state.delta)
}

/// Least-squares slope of `log v` against `log eps`.
pub fn fit_exponent(eps: &[f64], v: &[f64]) -> f64 {
    let x: Vec<f64> = eps.iter().map(|e| e.ln()).collect();
    let y: Vec<f64> = v.iter().map(|e| e.ln()).collect();
    let n = x.len() as f64;
    let (mx, my) = (x.iter().sum::<f64>() / n, y.iter().sum::<f64>() / n);
    let sxy: f64 = x.iter().zip(&y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
    sxy / sxx
}

/// Bounds `|chi^{(l)}| <= C_l eps^{l gamma}` of the cutoff, `l = 1, 2`.
pub const CUTOFF_BOUNDS: [f64; 2] = [1.875, 5.773502691896258];

/// Quintic step: 1 on `[0, 2 eps^-gamma]`, 0 from `3 eps^-gamma` on.
pub fn cutoff(radius: f64, eps: f64, gamma: f64) -> f64 {
    let s = radius * eps.powf(gamma) - 2.0;
    if s <= 0.0 {
        1.0
    } else if s >= 1.0 {
        0.0
    } else {
        (1.0 - s * s * s * (10.0 - 15.0 * s + 6.0 * s * s)).max(0.0)
    }
}

#[derive(Debug, Clone)]
pub struct GlobalApproximation {
    pub expansion: ExpansionState,
    pub gamma: f64,
    mu: Vec<f64>,
    phi: Vec<f64>,
    w: ZField,
}

/// The approximation `V_eps(z, X)` in the stretched tangential variable `z = y / eps`.
pub fn assemble_global(state: &ExpansionState, gamma: f64) -> Result<GlobalApproximation> {
    if !(gamma > 0.5 && gamma < 1.0) {
        return Err(Error::Domain(format!("cutoff exponent must lie in (1/2, 1), got {gamma}")));
    }
    Ok(GlobalApproximation { mu: state.mu_total(), phi: state.phi_total(), w: state.w_total(), expansion: state.clone(), gamma })
}

impl GlobalApproximation {
    pub fn eval(&self, z: f64, x: &[f64]) -> Result<f64> {
        let st = &self.expansion;
        let n = st.ctx.dims.dim;
        if x.len() != n {
            return Err(Error::Domain(format!("point has length {}, expected {n}", x.len())));
        }
        let grid = &st.cd.grid;
        let y = st.eps * z - grid.length * (st.eps * z / grid.length).floor();
        let m = grid.len();
        let mut xs = x.to_vec();
        for (l, c) in self.phi.chunks(m).enumerate() {
            xs[l] -= grid.interpolate(c, y);
        }
        let radius = xs.iter().map(|v| v * v).sum::<f64>().sqrt();
        let chi = cutoff(radius, st.eps, self.gamma);
        if chi == 0.0 {
            return Ok(0.0);
        }
        let mu = grid.interpolate(&self.mu, y);
        let xi: Vec<f64> = xs.iter().map(|v| v / mu).collect();
        let layer: Vec<f64> = self.w.slices.iter().map(|s| s.eval(&xi)).collect();
        let wv = st.ctx.bubble.w0(&xi) + grid.interpolate(&layer, y);
        Ok(mu.powf(-st.ctx.dims.half_nm2) * wv * chi)
    }
}

/// `max_l |X_l|` relative to the size of its terms, where
/// `X_l = -(1/3) R_mijs int (xi_m Phi^s + xi_s Phi^m) d_ij w0 d_l w0
///        + (2/3) R_mssj Phi^m int d_j w0 d_l w0`,
/// for `R` given as `R[((m d + i) d + j) d + s]`.
pub fn curvature_cancellation(bubble: &Bubble, r: &[f64], phi: &[f64], opts: &QuadOptions) -> Result<f64> {
    let n = bubble.dims.dim;
    let d = n - 1;
    if r.len() != d * d * d * d || phi.len() != d {
        return Err(Error::Domain(format!("need a tensor of length {} and a vector of length {d}", d * d * d * d)));
    }
    let m = moments(bubble, opts)?;
    // int xi_m d_ij w0 d_l w0 = (s + b) delta_ij delta_ml + b (delta_im delta_jl + delta_il delta_jm)
    let t = |mm: usize, i: usize, j: usize, l: usize| {
        let k = |a: usize, b: usize| if a == b { 1.0 } else { 0.0 };
        (m.s + m.b) * k(i, j) * k(mm, l) + m.b * (k(i, mm) * k(j, l) + k(i, l) * k(j, mm))
    };
    let at = |a: usize, b: usize, c: usize, e: usize| r[((a * d + b) * d + c) * d + e];
    let mut worst = 0.0f64;
    let mut scale = 0.0f64;
    for l in 0..d {
        let mut x = 0.0;
        for mm in 0..d {
            for i in 0..d {
                for j in 0..d {
                    for s in 0..d {
                        let c = at(mm, i, j, s);
                        if c == 0.0 {
                            continue;
                        }
                        let v = -(c / 3.0) * (t(mm, i, j, l) * phi[s] + t(s, i, j, l) * phi[mm]);
                        x += v;
                        scale = scale.max(v.abs());
                    }
                }
            }
            for s in 0..d {
                let v = (2.0 / 3.0) * at(mm, s, s, l) * phi[mm] * m.s;
                x += v;
                scale = scale.max(v.abs());
            }
        }
        worst = worst.max(x.abs());
    }
    Ok(if scale > 0.0 { worst / scale } else { 0.0 })
}

struct Moments {
    /// `int |d_1 w0|^2`.
    s: f64,
    /// `int xi_1^2 xi_2^2 (w0'' - w0'/r) w0' / r^3`.
    b: f64,
}

fn moments(bubble: &Bubble, opts: &QuadOptions) -> Result<Moments> {
    let n = bubble.dims.dim;
    let b = *bubble;
    let decay = 2.0 * n as f64 - 2.0;
    let s = quad_halfspace(&HalfspaceIntegrand::new(n, decay).push(Term::axis(n, &[(0, 2)], move |r| b.dw(r).powi(2))), opts)?.value;
    let bb = quad_halfspace(
        &HalfspaceIntegrand::new(n, decay).push(Term::axis(n, &[(0, 2), (1, 2)], move |r| r * (b.d2w(r) - b.dw(r) / r) * b.dw(r))),
        opts,
    )?
    .value;
    Ok(Moments { s, b: bb })
}

/// `int xi_j d_i w0 d_ij w0` for `i != j`.
pub fn cross_moment(bubble: &Bubble, opts: &QuadOptions) -> Result<f64> {
    Ok(moments(bubble, opts)?.b)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bubble::DimensionParams;
    use crate::constants::bubble_constants;
    use crate::eigen::Eigenpair;
    use crate::geometry::{builtin_geometry, synthetic_geometry, BuiltinGeometry, FieldEntry, FourierSeries, SyntheticSpec};
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::sync::OnceLock;

    struct Fixture {
        ctx: Arc<ModeContext>,
        ct: ConstantsTable,
    }

    fn fx() -> &'static Fixture {
        static F: OnceLock<Fixture> = OnceLock::new();
        F.get_or_init(|| {
            let dims = DimensionParams::new(7).unwrap();
            let eig = Eigenpair::compute(dims).unwrap();
            let ct = bubble_constants(dims, &eig, &QuadOptions::with_rel_tol(1e-10)).unwrap();
            Fixture { ctx: Arc::new(ModeContext::with_defaults(dims, &eig)), ct }
        })
    }

    fn diag_h(entries: &[f64]) -> CurvatureData {
        let h = entries
            .iter()
            .enumerate()
            .map(|(a, v)| FieldEntry { index: vec![a, a], series: FourierSeries::constant(*v) })
            .collect();
        synthetic_geometry(&SyntheticSpec { n: 8, length: 1.0, grid: 8, g_tilde: 1.0, h, r: None, gamma: Vec::new() }).unwrap()
    }

    #[test]
    fn mu0_on_the_round_sphere() {
        let f = fx();
        let cd = builtin_geometry(&BuiltinGeometry::RoundSphere, 8, 8).unwrap();
        let mu = mu0_field(&cd, &f.ct).unwrap();
        let want = f.ct.a1_frak * 8.0 / f.ct.b;
        assert!(mu.iter().all(|m| (m - want).abs() < 1e-13 * want));
    }

    #[test]
    fn mu0_needs_positive_curvature() {
        let f = fx();
        let cd = builtin_geometry(&BuiltinGeometry::Flat, 8, 8).unwrap();
        assert!(matches!(mu0_field(&cd, &f.ct), Err(Error::Positivity { .. })));
        let mut e = vec![1.0; 7];
        e[0] = 2.0;
        let mu = mu0_field(&diag_h(&e), &f.ct).unwrap();
        assert!((mu[0] - f.ct.a1_frak * 10.0 / f.ct.b).abs() < 1e-12 * mu[0]);
    }

    #[test]
    fn g1_projections_vanish() {
        let f = fx();
        let cd = builtin_geometry(&BuiltinGeometry::PerturbedSphere { amplitude: 0.1 }, 8, 8).unwrap();
        let mu = mu0_field(&cd, &f.ct).unwrap();
        let opts = QuadOptions::with_rel_tol(1e-12);
        for j in 0..8 {
            let p = g1_projections(&f.ctx.bubble, &cd, mu[j], j, &opts).unwrap();
            let scale = mu[j] * mu[j] * f.ct.b;
            assert!(p.z0.abs() <= 1e-6, "{}", p.z0);
            assert!(p.zl.iter().all(|v| v.abs() <= 1e-10));
            let g = rhs_g1(&f.ctx, &cd, mu[j], j).unwrap();
            assert!(g.project_kernel().z0.abs() <= 1e-6 * scale);
        }
    }

    #[test]
    fn g1_with_general_normal_block() {
        let f = fx();
        let mut e = vec![1.0; 7];
        e[2] = 3.0;
        let cd = diag_h(&e);
        let mu = mu0_field(&cd, &f.ct).unwrap();
        let g = rhs_g1(&f.ctx, &cd, mu[0], 0).unwrap();
        assert_eq!(g.blocks.len(), 2);
        let p = g1_projections(&f.ctx.bubble, &cd, mu[0], 0, &QuadOptions::with_rel_tol(1e-12)).unwrap();
        assert!(p.z0.abs() <= 1e-6 * mu[0] * mu[0] * f.ct.b);
        let q = g.project_kernel();
        assert!((q.z0 - p.z0).abs() <= 1e-6 * mu[0] * mu[0] * f.ct.b);
    }

    #[test]
    fn g1_without_curvature_is_the_bubble() {
        let f = fx();
        let cd = builtin_geometry(&BuiltinGeometry::Flat, 8, 8).unwrap();
        let g = rhs_g1(&f.ctx, &cd, 1.0, 0).unwrap();
        let w = ModeFunction::radial(&f.ctx, 5.0, f.ctx.w.clone());
        let mut diff = g.clone();
        diff.add_scaled(&w, 1.0);
        assert!(diff.l2_norm() < 1e-9 * w.l2_norm());
    }

    #[test]
    fn order_one_is_y_independent_for_constant_data() {
        let f = fx();
        let cd = builtin_geometry(&BuiltinGeometry::RoundSphere, 8, 8).unwrap();
        let mu = mu0_field(&cd, &f.ct).unwrap();
        let (w1, diags) = solve_order1(&f.ctx, &cd, &mu, 0.05, &SolveOptions::default()).unwrap();
        let dy = w1.y_derivative(&cd.grid, 1).unwrap();
        let base = w1.slices[0].l2_norm();
        assert!(dy.slices.iter().all(|s| s.l2_norm() <= 1e-10 * base));
        for s in &w1.slices {
            let p = s.project_kernel();
            assert!(p.max_kernel() <= 1e-8 * base);
        }
        assert!(diags.iter().all(|d| d.ratio.is_finite()));
    }

    #[test]
    fn order_zero_state_matches_solve_order1() {
        let f = fx();
        let cd = builtin_geometry(&BuiltinGeometry::PerturbedSphere { amplitude: 0.1 }, 8, 8).unwrap();
        let opts = ExpansionOptions { order: 0, ..Default::default() };
        let st = build_expansion(&f.ctx, &cd, &f.ct, 0.05, &opts).unwrap();
        let mu = mu0_field(&cd, &f.ct).unwrap();
        let (w1, _) = solve_order1(&f.ctx, &cd, &mu, 0.05, &opts.solve).unwrap();
        assert_eq!(st.mu_layers.len(), 1);
        assert_eq!(st.w_layers.len(), 1);
        for (a, b) in st.w_layers[0].slices.iter().zip(&w1.slices) {
            assert_eq!(a.blocks, b.blocks);
        }
    }

    #[test]
    fn round_sphere_fails_at_the_shift() {
        let f = fx();
        let cd = builtin_geometry(&BuiltinGeometry::RoundSphere, 8, 8).unwrap();
        let err = build_expansion(&f.ctx, &cd, &f.ct, 0.01, &ExpansionOptions::default()).unwrap_err();
        assert!(matches!(err, Error::Layer { layer: 1, .. }));
        assert!(matches!(err.root(), Error::Degenerate { .. }));
    }

    #[test]
    fn mu_step_kills_the_z0_projection() {
        let f = fx();
        let cd = builtin_geometry(&BuiltinGeometry::PerturbedSphere { amplitude: 0.1 }, 8, 8).unwrap();
        let st = build_expansion(&f.ctx, &cd, &f.ct, 0.01, &ExpansionOptions::default()).unwrap();
        assert!(st.norms.z0_after_mu[0] <= 1e-8, "{:?}", st.norms);
        assert_eq!(st.norms.zl_before_phi[0], 0.0);
        assert!(st.mu_total().iter().all(|m| *m > 0.0));
    }

    #[test]
    fn mu_step_without_anything_to_balance() {
        let f = fx();
        let cd = builtin_geometry(&BuiltinGeometry::Flat, 8, 8).unwrap();
        let ob = OperatorBundle::new(&cd).unwrap();
        // no curvature and no layers: E(w0) = -eps mu^2 w0 has Z_0 projection eps mu^2 B
        // which no finite mu_i can cancel; mu = 0 is the balanced state
        let w = ZField::zero(&f.ctx, 8, 5.0);
        let e = ob.residual(0.1, &[0.0; 8], &w).unwrap();
        assert!(e.iter().all(|s| s.project_kernel().z0.abs() < 1e-10));
    }

    #[test]
    fn flat_residual_is_the_mass_term() {
        let f = fx();
        let cd = builtin_geometry(&BuiltinGeometry::Flat, 8, 8).unwrap();
        let w = ZField::zero(&f.ctx, 8, 5.0);
        let w0 = ModeFunction::radial(&f.ctx, 5.0, f.ctx.w.clone());
        let mut norms = Vec::new();
        for eps in [0.1, 0.05] {
            let r = residual_of(&cd, eps, &[1.0; 8], &w, 1.0).unwrap();
            let want = w0.scaled(eps).weighted_norm(eps, 5.0, 1.0);
            assert!((r.norm - want).abs() < 1e-6 * want, "{} {want}", r.norm);
            norms.push(r.norm);
        }
        assert!(norms[0] > norms[1]);
    }

    #[test]
    fn unkilled_first_order_residual_is_order_eps() {
        let f = fx();
        let cd = builtin_geometry(&BuiltinGeometry::RoundSphere, 8, 8).unwrap();
        let mu = mu0_field(&cd, &f.ct).unwrap();
        let w = ZField::zero(&f.ctx, 8, 5.0);
        let eps = [0.02, 0.01, 0.005];
        let v: Vec<f64> = eps.iter().map(|e| residual_of(&cd, *e, &mu, &w, 1.0).unwrap().norm).collect();
        let k = fit_exponent(&eps, &v);
        assert!((k - 1.0).abs() < 0.2, "{k}");
    }

    #[test]
    fn cross_moment_is_half_c0() {
        let f = fx();
        let v = cross_moment(&f.ctx.bubble, &QuadOptions::with_rel_tol(1e-11)).unwrap();
        assert!((v + 0.5 * f.ct.c0).abs() < 1e-8 * f.ct.c0, "{v} {}", f.ct.c0);
    }

    fn random_curvature(rng: &mut ChaCha8Rng, d: usize) -> Vec<f64> {
        let k = 3;
        let omegas: Vec<Vec<f64>> = (0..k)
            .map(|_| {
                let mut o = vec![0.0; d * d];
                for a in 0..d {
                    for b in a + 1..d {
                        let v = rng.random_range(-1.0..1.0);
                        o[a * d + b] = v;
                        o[b * d + a] = -v;
                    }
                }
                o
            })
            .collect();
        let mut c = vec![0.0; k * k];
        for a in 0..k {
            for b in a..k {
                let v = rng.random_range(-1.0..1.0);
                c[a * k + b] = v;
                c[b * k + a] = v;
            }
        }
        let mut r = vec![0.0; d * d * d * d];
        for m in 0..d {
            for i in 0..d {
                for j in 0..d {
                    for s in 0..d {
                        let mut v = 0.0;
                        for a in 0..k {
                            for b in 0..k {
                                v += c[a * k + b] * omegas[a][m * d + i] * omegas[b][j * d + s];
                            }
                        }
                        r[((m * d + i) * d + j) * d + s] = v;
                    }
                }
            }
        }
        r
    }

    #[test]
    fn curvature_terms_cancel() {
        let f = fx();
        let mut rng = ChaCha8Rng::seed_from_u64(2024);
        let opts = QuadOptions::with_rel_tol(1e-12);
        for _ in 0..10 {
            let r = random_curvature(&mut rng, 6);
            let phi: Vec<f64> = (0..6).map(|_| rng.random_range(-1.0..1.0)).collect();
            let res = curvature_cancellation(&f.ctx.bubble, &r, &phi, &opts).unwrap();
            assert!(res <= 1e-8, "{res}");
        }
    }

    #[test]
    fn cutoff_plateau_and_support() {
        let (eps, g) = (0.01, 0.75);
        let s = eps.powf(-g);
        assert_eq!(cutoff(1.99 * s, eps, g), 1.0);
        assert_eq!(cutoff(3.0 * s, eps, g), 0.0);
        assert_eq!(cutoff(4.5 * s, eps, g), 0.0);
        // derivative bound by differences
        let h = 1e-4 * s;
        let mut worst = 0.0f64;
        for k in 0..1000 {
            let x = 2.0 * s + s * k as f64 / 1000.0;
            worst = worst.max((cutoff(x + h, eps, g) - cutoff(x, eps, g)).abs() / h);
        }
        assert!(worst <= CUTOFF_BOUNDS[0] * eps.powf(g) * (1.0 + 1e-3));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]
        #[test]
        fn cutoff_is_monotone(a in 0.0f64..5.0, b in 0.0f64..5.0, eps in 0.001f64..0.2) {
            let (lo, hi) = if a < b { (a, b) } else { (b, a) };
            let s = eps.powf(-0.75);
            prop_assert!(cutoff(lo * s, eps, 0.75) >= cutoff(hi * s, eps, 0.75));
        }
    }
}
