//! Leading reduced quadratic forms along the curve, their eigenvalue curves
//! in `sigma = eps^2`, Weyl counting, the dyadic gap search and the
//! decomposition of a function against the cut-off kernel.

use num_traits::Float;
use crate::constants::ConstantsTable;
use crate::error::{Error, Result};
use crate::expansion::ExpansionState;
use crate::geometry::CurvatureData;
use crate::laplacian::ZField;
use crate::modes::{Harmonic, ModeFunction};
use crate::periodic::PeriodicGrid;
use alloc::format;
use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;
use nalgebra::{DMatrix, DVector, SymmetricEigen};

pub const TRUNCATION: &str = "leading forms only: o(eps^2) corrections and the compact perturbations P1, Q1, R1 omitted";

/// Points of the sign-change grid per dyadic level.
pub const LEVEL_GRID: usize = 1 << 12;

#[derive(Debug, Clone)]
pub struct ReducedForms {
    pub eps: f64,
    /// `int Z_0^2`.
    pub a: f64,
    /// `int w0^2`.
    pub b: f64,
    /// `int Z_1^2`.
    pub c: f64,
    /// `int Z^2`.
    pub d: f64,
    pub lambda0: f64,
    pub grid: PeriodicGrid,
    pub g_tilde: f64,
    pub components: usize,
    /// Jacobi potential `R_ml(y_j)` at `[j][m * components + l]`.
    pub potential: Vec<Vec<f64>>,
    pub truncation: &'static str,
}

pub fn reduced_forms(cd: &CurvatureData, ct: &ConstantsTable, eps: f64) -> Result<ReducedForms> {
    let g0 = cd.g_tilde[0];
    if cd.g_tilde.iter().any(|g| (g - g0).abs() > 1e-12 * g0) {
        return Err(Error::Representation("reduced forms need a constant induced metric along the curve".into()));
    }
    if !(eps > 0.0) {
        return Err(Error::Domain(format!("eps must be positive, got {eps}")));
    }
    Ok(ReducedForms {
        eps,
        a: ct.a,
        b: ct.b,
        c: ct.c,
        d: ct.d,
        lambda0: ct.lambda0,
        grid: cd.grid.clone(),
        g_tilde: g0,
        components: cd.dim() - 1,
        potential: (0..cd.samples()).map(|j| cd.jacobi_potential(j)).collect(),
        truncation: TRUNCATION,
    })
}

impl ReducedForms {
    pub fn samples(&self) -> usize {
        self.grid.len()
    }

    pub fn arc_length(&self) -> f64 {
        self.grid.length * self.g_tilde.sqrt()
    }

    fn integrate(&self, f: impl Iterator<Item = f64>) -> f64 {
        self.grid.length / self.samples() as f64 * self.g_tilde.sqrt() * f.sum::<f64>()
    }

    fn dirichlet(&self, f: &[f64]) -> f64 {
        let df = self.grid.derivative(f);
        self.integrate(df.iter().map(|v| v * v / self.g_tilde))
    }

    fn mass(&self, f: &[f64]) -> f64 {
        self.integrate(f.iter().map(|v| v * v))
    }

    /// `(A/2) eps^2 int |d delta|^2 + (B/2) eps int delta^2`.
    pub fn p(&self, delta: &[f64]) -> f64 {
        0.5 * self.a * self.eps * self.eps * self.dirichlet(delta) + 0.5 * self.b * self.eps * self.mass(delta)
    }

    /// `(C eps^2/2) [int |d' |^2 + int R_ml d^m d^l]`, `d` component-major.
    pub fn q(&self, d: &[f64]) -> f64 {
        let m = self.samples();
        let k = self.components;
        let grad: f64 = d.chunks(m).map(|c| self.dirichlet(c)).sum();
        let pot = self.integrate((0..m).map(|j| {
            let r = &self.potential[j];
            let mut s = 0.0;
            for a in 0..k {
                for b in 0..k {
                    s += r[a * k + b] * d[a * m + j] * d[b * m + j];
                }
            }
            s
        }));
        0.5 * self.c * self.eps * self.eps * (grad + pot)
    }

    /// `(D/2) [eps^2 int |e'|^2 - lambda0 int e^2]`.
    pub fn r(&self, e: &[f64]) -> f64 {
        0.5 * self.d * (self.eps * self.eps * self.dirichlet(e) - self.lambda0 * self.mass(e))
    }

    /// Eigenvalue of the operator of the R-form on the Fourier mode `m`.
    pub fn mode_eigenvalue(&self, eps: f64, m: usize) -> f64 {
        let k = 2.0 * PI * m as f64 / self.arc_length();
        self.d * (eps * eps * k * k - self.lambda0)
    }

    /// Collocation matrix of `D (-eps^2 Delta_K - lambda0)` on the grid.
    pub fn operator_matrix(&self, eps: f64) -> DMatrix<f64> {
        let m = self.samples();
        let d2 = self.grid.d2();
        let mut a = DMatrix::from_fn(m, m, |i, j| -self.d * eps * eps * d2[i * m + j] / self.g_tilde);
        for i in 0..m {
            a[(i, i)] -= self.d * self.lambda0;
        }
        (&a + a.transpose()) * 0.5
    }
}

/// The lowest `count` eigenvalues of the leading reduced operator, ascending
/// and repeated with multiplicity.
pub fn reduced_eigenvalues(forms: &ReducedForms, eps: f64, count: usize) -> Result<Vec<f64>> {
    if count > forms.samples() {
        return Err(Error::Validation(format!("{count} eigenvalues requested on a grid of {} samples", forms.samples())));
    }
    let mut out: Vec<f64> = (0..count).map(|j| forms.mode_eigenvalue(eps, j.div_ceil(2))).collect();
    out.sort_by(|a, b| a.total_cmp(b));
    Ok(out)
}

fn eigenvalue_at_sigma(forms: &ReducedForms, sigma: f64, j: usize) -> f64 {
    forms.mode_eigenvalue(sigma.sqrt(), j.div_ceil(2))
}

/// Rayleigh-Ritz values of the leading reduced operator on `span(basis)`.
pub fn rayleigh_ritz(forms: &ReducedForms, eps: f64, basis: &[Vec<f64>]) -> Result<Vec<f64>> {
    let m = forms.samples();
    if basis.is_empty() || basis.iter().any(|b| b.len() != m) {
        return Err(Error::Validation(format!("trial vectors must be non-empty with {m} samples")));
    }
    let v = DMatrix::from_fn(m, basis.len(), |i, k| basis[k][i]);
    let q = v.qr().q();
    let t = q.transpose() * forms.operator_matrix(eps) * &q;
    let mut vals: Vec<f64> = SymmetricEigen::new((&t + t.transpose()) * 0.5).eigenvalues.iter().copied().collect();
    vals.sort_by(|a, b| a.total_cmp(b));
    Ok(vals)
}

/// Number of modes with `(2 pi m / L)^2 <= a / sigma` on a circle of length `L`.
/// Boundary modes (zero eigenvalue) are counted.
pub fn weyl_count(sigma: f64, a_const: f64, length: f64) -> Result<usize> {
    if !(sigma > 0.0) || !(a_const > 0.0) || !(length > 0.0) {
        return Err(Error::Domain(format!("weyl_count needs positive sigma, a and L, got {sigma}, {a_const}, {length}")));
    }
    let x = (a_const / sigma).sqrt() * length / (2.0 * PI);
    let m = (x * (1.0 + 1e-12)).floor() as usize;
    Ok(2 * m + 1)
}

#[derive(Debug, Clone, PartialEq)]
pub struct GapResult {
    pub level: u32,
    pub window: (f64, f64),
    /// Distinct zero crossings in the window, ascending in sigma.
    pub crossings: Vec<f64>,
    /// `(j, sigma)` for every curve crossing, with multiplicity.
    pub resonances: Vec<(usize, f64)>,
    pub interval: (f64, f64),
    pub sigma: f64,
    pub eps: f64,
    pub gap: f64,
    pub c_observed: f64,
    pub meets_target: bool,
    /// Negative eigenvalue count at the bottom of the window.
    pub negative_count: usize,
}

/// Bisection for the root of a curve increasing in sigma.
fn bisect(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64) -> f64 {
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if f(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Widest crossing-free interval in `(2^-(l+1), 2^-l)` and the gap at its midpoint.
pub fn find_gap_epsilon(forms: &ReducedForms, level: u32, count: usize, c_target: f64) -> Result<GapResult> {
    let lo = 0.5.powi(level as i32 + 1);
    let hi = 2.0 * lo;
    let top = reduced_eigenvalues(forms, lo.sqrt(), count)?;
    if top[count - 1] <= 0.0 {
        return Err(Error::Resolution(format!(
            "level {level}: all {count} computed eigenvalues are negative at sigma = {lo:e}; raise the eigenvalue count"
        )));
    }
    let negative_count = top.iter().filter(|v| **v < 0.0).count();
    let h = (hi - lo) / LEVEL_GRID as f64;
    let sig: Vec<f64> = (0..=LEVEL_GRID).map(|i| lo + h * i as f64).collect();
    let mut resonances = Vec::new();
    for j in 0..count {
        let f = |s: f64| eigenvalue_at_sigma(forms, s, j);
        let mut prev = f(sig[0]);
        for w in sig.windows(2) {
            let next = f(w[1]);
            if prev < 0.0 && next >= 0.0 {
                resonances.push((j, bisect(f, w[0], w[1])));
            } else if prev >= 0.0 && next < 0.0 {
                return Err(Error::Numerical(format!("eigenvalue curve {j} decreases across sigma = {:e}", w[0])));
            }
            prev = next;
        }
    }
    let mut crossings: Vec<f64> = resonances.iter().map(|r| r.1).collect();
    crossings.sort_by(|a, b| a.total_cmp(b));
    crossings.dedup_by(|a, b| (*a - *b).abs() <= 1e-12 * *b);
    let bounds: Vec<f64> = if crossings.len() >= 2 {
        crossings.clone()
    } else {
        let mut b = vec![lo];
        b.extend(&crossings);
        b.push(hi);
        b
    };
    let (a_l, b_l) = bounds
        .windows(2)
        .map(|w| (w[0], w[1]))
        .fold((0.0, 0.0), |best, w| if w.1 - w.0 > best.1 - best.0 { w } else { best });
    if b_l - a_l <= h {
        return Err(Error::Resolution(format!("level {level}: widest crossing-free interval {:e} is below the grid step {h:e}", b_l - a_l)));
    }
    let sigma = 0.5 * (a_l + b_l);
    let eps = sigma.sqrt();
    let gap = reduced_eigenvalues(forms, eps, count)?.iter().fold(f64::INFINITY, |m, v| m.min(v.abs()));
    let c_observed = gap / eps;
    Ok(GapResult {
        level,
        window: (lo, hi),
        crossings,
        resonances,
        interval: (a_l, b_l),
        sigma,
        eps,
        gap,
        c_observed,
        meets_target: c_observed >= c_target,
        negative_count,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct SandwichFit {
    pub gamma_minus: f64,
    pub gamma_plus: f64,
    /// Smallest slack of either side of the inequality over all checked pairs, relative.
    pub worst_slack: f64,
    pub holds: bool,
}

/// Fits `gamma_-` and `gamma_+` of the two-sided bound on
/// `sigma^-1 lambda_j(sigma)` increments over pairs inside each dyadic window,
/// with a 1% margin, then checks every pair against the fitted constants.
pub fn sandwich_fit(forms: &ReducedForms, levels: &[u32], count: usize, points: usize) -> Result<SandwichFit> {
    let mut pairs = Vec::new();
    for &l in levels {
        let lo = 0.5.powi(l as i32 + 1);
        // strictly inside the window so that sigma_2 / 2 < sigma_1
        let sig: Vec<f64> = (1..points).map(|i| lo * (1.0 + i as f64 / points as f64)).collect();
        let curves: Vec<Vec<f64>> = sig.iter().map(|s| reduced_eigenvalues(forms, s.sqrt(), count)).collect::<Result<_>>()?;
        for i in 0..sig.len() {
            for k in i + 1..sig.len() {
                for j in 0..count {
                    let (s1, s2) = (sig[i], sig[k]);
                    pairs.push((s1, s2, curves[k][j] / s2 - curves[i][j] / s1));
                }
            }
        }
    }
    let lower = |(s1, s2, dl): (f64, f64, f64)| 2.0 * s2 * s2 * dl / (s2 - s1);
    let upper = |(s1, s2, dl): (f64, f64, f64)| s1 * s1 * dl / (2.0 * (s2 - s1));
    let gamma_minus = 0.99 * pairs.iter().map(|p| lower(*p)).fold(f64::INFINITY, f64::min);
    let gamma_plus = 1.01 * pairs.iter().map(|p| upper(*p)).fold(f64::NEG_INFINITY, f64::max);
    let mut worst = f64::INFINITY;
    for &(s1, s2, dl) in &pairs {
        let lb = (s2 - s1) * gamma_minus / (2.0 * s2 * s2);
        let ub = 2.0 * (s2 - s1) * gamma_plus / (s1 * s1);
        worst = worst.min((dl - lb) / lb.abs().max(1e-300)).min((ub - dl) / ub.abs().max(1e-300));
    }
    let holds = gamma_minus > 0.0 && gamma_plus.is_finite() && worst >= 0.0;
    Ok(SandwichFit { gamma_minus, gamma_plus, worst_slack: worst, holds })
}

#[derive(Debug, Clone)]
pub struct SpectrumReport {
    pub sigma_grid: Vec<f64>,
    pub eps_grid: Vec<f64>,
    /// `lambda_curves[j][i]` at `sigma_grid[i]`.
    pub lambda_curves: Vec<Vec<f64>>,
    pub resonances: Vec<(usize, f64)>,
    pub selected: Vec<GapResult>,
    pub sandwich: SandwichFit,
    pub truncation: &'static str,
}

/// Eigenvalue curves sampled over the union of the level windows, plus the
/// gap selection on every level.
pub fn spectrum_report(forms: &ReducedForms, levels: &[u32], count: usize, c_target: f64, samples_per_level: usize) -> Result<SpectrumReport> {
    let mut sigma_grid = Vec::new();
    let mut ordered: Vec<u32> = levels.to_vec();
    ordered.sort_unstable_by(|a, b| b.cmp(a));
    for &l in &ordered {
        let lo = 0.5.powi(l as i32 + 1);
        for i in 0..samples_per_level {
            sigma_grid.push(lo * (1.0 + i as f64 / samples_per_level as f64));
        }
    }
    let eps_grid: Vec<f64> = sigma_grid.iter().map(|s| s.sqrt()).collect();
    let by_sigma: Vec<Vec<f64>> = eps_grid.iter().map(|e| reduced_eigenvalues(forms, *e, count)).collect::<Result<_>>()?;
    let lambda_curves = (0..count).map(|j| by_sigma.iter().map(|v| v[j]).collect()).collect();
    let selected: Vec<GapResult> = levels.iter().map(|&l| find_gap_epsilon(forms, l, count, c_target)).collect::<Result<_>>()?;
    let resonances = selected.iter().flat_map(|g| g.resonances.iter().map(|(j, s)| (*j, s.sqrt()))).collect();
    let sandwich = sandwich_fit(forms, levels, count, 16)?;
    Ok(SpectrumReport { sigma_grid, eps_grid, lambda_curves, resonances, selected, sandwich, truncation: TRUNCATION })
}

/// Cut-off of the decomposition: 1 below `1.5 eps^-gamma`, 0 above `2 eps^-gamma`.
pub fn chi_bar(radius: f64, eps: f64, gamma: f64) -> f64 {
    let s = 2.0 * (radius * eps.powf(gamma) - 1.5);
    if s <= 0.0 {
        1.0
    } else if s >= 1.0 {
        0.0
    } else {
        (1.0 - s * s * s * (10.0 - 15.0 * s + 6.0 * s * s)).max(0.0)
    }
}

#[derive(Debug, Clone)]
pub struct Decomposition {
    pub delta: Vec<f64>,
    /// `d[j][l]`, `l = 1 .. N-1` stored from 0.
    pub d: Vec<Vec<f64>>,
    pub e: Vec<f64>,
    pub phi_perp: ZField,
    /// Largest normalized overlap between the cut-off `Z_0` and `Z`.
    pub cross_term: f64,
    /// Largest normalized projection of `phi_perp` on the cut-off kernel.
    pub orthogonality: f64,
}

/// Cut-off kernel functions `chi Z_0`, `chi Z_1 .. chi Z_{N-1}`, `chi Z`.
fn cut_kernel(phi: &ZField, eps: f64, gamma: f64) -> Vec<ModeFunction> {
    let ctx = &phi.ctx;
    let n = ctx.dims.dim;
    let chi: Vec<f64> = ctx.grid.r.iter().map(|r| chi_bar(*r, eps, gamma)).collect();
    let cut = |u: &[f64]| u.iter().zip(&chi).map(|(a, b)| a * b).collect::<Vec<f64>>();
    let decay = ctx.dims.n() - 2.0;
    let mut out = vec![ModeFunction::radial(ctx, decay, cut(&ctx.z0))];
    for l in 0..n - 1 {
        let mut c = vec![0.0; n - 1];
        c[l] = 1.0;
        let mut f = ModeFunction::radial(ctx, decay, cut(&ctx.dw));
        f.blocks[0].harmonic = Harmonic::Linear(c);
        out.push(f);
    }
    out.push(ModeFunction::radial(ctx, decay, cut(&ctx.z)));
    out
}

/// Writes `phi = sum_k (c_k / mu) chi K_k + phi_perp` with `phi_perp`
/// orthogonal to every `chi K_k`, slice by slice along the curve.
pub fn decompose_with(phi: &ZField, mu: &[f64], eps: f64, gamma: f64) -> Result<Decomposition> {
    if mu.len() != phi.len() {
        return Err(Error::Validation(format!("{} scales for {} slices", mu.len(), phi.len())));
    }
    if let Some(m) = mu.iter().find(|m| !(**m > 0.0)) {
        return Err(Error::Domain(format!("concentration scale must be positive, got {m}")));
    }
    let basis = cut_kernel(phi, eps, gamma);
    let k = basis.len();
    let gram = DMatrix::from_fn(k, k, |a, b| basis[a].inner(&basis[b]));
    let norms: Vec<f64> = (0..k).map(|a| gram[(a, a)].sqrt()).collect();
    let cross_term = gram[(0, k - 1)].abs() / (norms[0] * norms[k - 1]);
    let chol = gram.clone().cholesky().ok_or_else(|| Error::Numerical("cut-off kernel Gram matrix is not positive definite".into()))?;
    let (mut delta, mut d, mut e) = (Vec::new(), Vec::new(), Vec::new());
    let mut slices = Vec::with_capacity(phi.len());
    let mut orthogonality = 0.0f64;
    for (slice, &m) in phi.slices.iter().zip(mu) {
        let rhs = DVector::from_iterator(k, basis.iter().map(|b| slice.inner(b)));
        let c = chol.solve(&rhs);
        let mut perp = slice.clone();
        for (b, ck) in basis.iter().zip(c.iter()) {
            perp.add_scaled(b, -ck);
        }
        let scale = slice.l2_norm().max(1e-300);
        for (a, b) in basis.iter().enumerate() {
            orthogonality = orthogonality.max(perp.inner(b).abs() / (scale * norms[a]));
        }
        delta.push(m * c[0]);
        d.push((1..k - 1).map(|l| m * c[l]).collect());
        e.push(m * c[k - 1]);
        slices.push(perp);
    }
    Ok(Decomposition { delta, d, e, phi_perp: ZField { ctx: phi.ctx.clone(), slices }, cross_term, orthogonality })
}

pub fn decompose(phi: &ZField, state: &ExpansionState, gamma: f64) -> Result<Decomposition> {
    decompose_with(phi, &state.mu_total(), state.eps, gamma)
}

/// Inverse of [`decompose_with`].
pub fn reconstruct(dec: &Decomposition, mu: &[f64], eps: f64, gamma: f64) -> ZField {
    let basis = cut_kernel(&dec.phi_perp, eps, gamma);
    let k = basis.len();
    let mut out = dec.phi_perp.clone();
    for (j, slice) in out.slices.iter_mut().enumerate() {
        let m = mu[j];
        slice.add_scaled(&basis[0], dec.delta[j] / m);
        for l in 1..k - 1 {
            slice.add_scaled(&basis[l], dec.d[j][l - 1] / m);
        }
        slice.add_scaled(&basis[k - 1], dec.e[j] / m);
    }
    out
}
