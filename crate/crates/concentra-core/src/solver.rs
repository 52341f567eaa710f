//! `-Delta phi - p w0^{p-1} phi + eps a phi = g` on `R^N_+` with the Neumann
//! condition on `xi_N = 0`, for right-hand sides orthogonal to `Z_0..Z_{N-1}`.
//!
//! Each (block, mode) pair is a two-point boundary value problem in `r`,
//! solved by second-order differences on the fine grid and its even subgrid
//! and combined by Richardson extrapolation. The outer end carries the
//! decaying far-field solution as a Robin condition.

use num_traits::Float;
use crate::error::{Error, Result};
use crate::grid::{prolong, solve_tridiagonal, RadialGrid};
use crate::modes::{KernelProjections, ModeFunction};
use crate::quadrature::{integrate, QuadOptions};
use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolveOptions {
    /// Admissibility: `|<g, Z_j>| <= orth_tol ||g|| ||Z_j||`.
    pub orth_tol: f64,
    /// Decay rate `r` of the weighted norms used for the diagnostics.
    pub rate: f64,
    /// Inner-region radius is `delta / sqrt(eps)`.
    pub delta: f64,
}

impl Default for SolveOptions {
    fn default() -> Self {
        Self { orth_tol: 1e-6, rate: 4.0, delta: 1.0 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolveDiagnostics {
    /// Projections of the right-hand side.
    pub projections: KernelProjections,
    /// `int g Z / ((eps a - lambda0) int Z^2)`, the `Z`-coefficient of the solution.
    pub beta: f64,
    /// `||phi||_{eps, rate-2} / ||g||_{eps, rate}`.
    pub ratio: f64,
    /// Largest kernel projection removed from the raw solution.
    pub removed: f64,
}

/// `K_{nu-1}(x) / K_nu(x)` from `K_nu(x) = int_0^inf exp(-x cosh s) cosh(nu s) ds`.
pub fn bessel_k_ratio(nu: f64, x: f64) -> Result<f64> {
    if !(x > 0.0) {
        return Err(Error::Domain(format!("Bessel argument must be positive, got {x}")));
    }
    // end point where the scaled integrand is below e^-60 of its peak
    let mut top = 1.0f64;
    let log_f = |s: f64| -x * (s.cosh() - 1.0) + nu * s;
    let peak = {
        let sp = (nu / x).asinh();
        log_f(sp)
    };
    while log_f(top) > peak - 60.0 {
        top *= 1.5;
    }
    let opts = QuadOptions::with_rel_tol(1e-13);
    let k = |mu: f64| -> Result<f64> {
        let f = move |s: f64| (-x * (s.cosh() - 1.0) + mu * s - peak).exp() * (1.0 + (-2.0 * mu * s).exp()) * 0.5;
        Ok(integrate(&f, 0.0, top, &opts)?.value)
    };
    Ok(k((nu - 1.0).abs())? / k(nu)?)
}

fn robin(ell: f64, n: f64, kappa: f64, r: f64) -> Result<f64> {
    if kappa == 0.0 {
        return Ok(-(n - 2.0 + ell) / r);
    }
    let nu = ell + (n - 2.0) / 2.0;
    Ok(-(n - 2.0) / (2.0 * r) - kappa * bessel_k_ratio(nu, kappa * r)? - nu / r)
}

/// One radial problem `-u'' - (N-1)/r u' + l(l+N-2)/r^2 u - V u + k^2 u = g`.
#[allow(clippy::too_many_arguments)]
fn solve_profile(grid: &RadialGrid, pot: &[f64], g: &[f64], ell: f64, n: f64, k2: f64, rho: f64, eta: f64) -> Result<Vec<f64>> {
    let m = grid.len();
    let (mut a, mut b, mut c) = (vec![0.0; m], vec![0.0; m], vec![0.0; m]);
    let mut d = g.to_vec();
    if ell == 0.0 {
        let q = 2.0 * n / (grid.rs[0] * grid.rs[0]);
        b[0] = q - pot[0] + k2;
        c[0] = -q;
    } else {
        b[0] = 1.0;
        d[0] = 0.0;
    }
    let cent = ell * (ell + n - 2.0);
    for i in 1..m {
        let (r, rs, rss) = (grid.r[i], grid.rs[i], grid.rss[i]);
        let aa = 1.0 / (rs * rs);
        let bb = 0.5 * (-rss / (rs * rs * rs) + (n - 1.0) / (r * rs));
        a[i] = -(aa - bb);
        b[i] = 2.0 * aa + cent / (r * r) - pot[i] + k2;
        c[i] = -(aa + bb);
    }
    // ghost node from u_r = rho u + eta
    let last = m - 1;
    let rs = grid.rs[last];
    a[last] += c[last];
    b[last] += c[last] * 2.0 * rs * rho;
    d[last] -= c[last] * 2.0 * rs * eta;
    c[last] = 0.0;
    solve_tridiagonal(&a, &b, &c, &mut d).ok_or_else(|| Error::Numerical("singular radial operator".into()))?;
    Ok(d)
}

/// The radial problem with a kernel multiplier: `L u = g + c k` with
/// `int r^{N-1} u k = 0`. The continuous multiplier vanishes for admissible
/// `g`; the discrete one absorbs the part of the truncation error that the
/// nearly singular direction `k` would otherwise amplify by `1/(eps a)`.
#[allow(clippy::too_many_arguments)]
fn solve_bordered(grid: &RadialGrid, pot: &[f64], g: &[f64], k: &[f64], ell: f64, n: f64, k2: f64, rho: f64, eta: f64) -> Result<Vec<f64>> {
    let v1 = solve_profile(grid, pot, g, ell, n, k2, rho, eta)?;
    let v2 = solve_profile(grid, pot, k, ell, n, k2, rho, 0.0)?;
    let ip = |u: &[f64]| -> f64 { (0..grid.len()).map(|i| grid.weights[i] * grid.r[i].powf(n - 1.0) * u[i] * k[i]).sum() };
    let den = ip(&v2);
    if den == 0.0 || !den.is_finite() {
        return Err(Error::Numerical("degenerate kernel bordering".into()));
    }
    let c = -ip(&v1) / den;
    Ok(v1.iter().zip(&v2).map(|(a, b)| a + c * b).collect())
}

/// Node values on the refined grid: even nodes copied, odd nodes by
/// six-point midpoint interpolation in the grid index, reflected through
/// `r = 0` with the given parity.
fn refine_values(u: &[f64], parity: f64) -> Vec<f64> {
    const W: [f64; 6] = [3.0 / 256.0, -25.0 / 256.0, 150.0 / 256.0, 150.0 / 256.0, -25.0 / 256.0, 3.0 / 256.0];
    let n = u.len();
    let at = |k: isize| if k < 0 { parity * u[(-k) as usize] } else { u[k as usize] };
    let mut out = prolong(u, 2 * n - 1);
    for k in 0..n - 1 {
        if k + 3 < n {
            let ki = k as isize;
            out[2 * k + 1] = (0..6).map(|j| W[j] * at(ki - 2 + j as isize)).sum();
        }
    }
    out
}

/// Two-step extrapolation of solutions at spacings `2h`, `h`, `h/2`, returned on the `h` nodes.
fn richardson(uc: &[f64], uf: &[f64], ur: &[f64]) -> Vec<f64> {
    let n = uf.len();
    let r1: Vec<f64> = (0..n).map(|i| ur[2 * i] + (ur[2 * i] - uf[i]) / 3.0).collect();
    let corr: Vec<f64> = uc.iter().enumerate().map(|(i, c)| {
        let r0 = uf[2 * i] + (uf[2 * i] - c) / 3.0;
        (r1[2 * i] - r0) / 15.0
    }).collect();
    let corr = prolong(&corr, n);
    r1.iter().zip(&corr).map(|(a, b)| a + b).collect()
}

/// Solves the linearized problem; returns the solution with its diagnostics.
pub fn solve_linearized(g: &ModeFunction, eps: f64, a: f64, opts: &SolveOptions) -> Result<(ModeFunction, SolveDiagnostics)> {
    let ctx = g.ctx.clone();
    let n = ctx.dims.n();
    if !(eps >= 0.0) || !(a >= 0.0) {
        return Err(Error::Domain(format!("need eps >= 0 and a >= 0, got eps = {eps}, a = {a}")));
    }
    let k2 = eps * a;
    let kappa = k2.sqrt();
    if (k2 - ctx.lambda0).abs() < 1e-8 * ctx.lambda0 {
        return Err(Error::Numerical(format!("eps a = {k2} resonates with lambda0 = {}", ctx.lambda0)));
    }
    let proj = g.project_kernel();
    let gnorm = g.l2_norm();
    let znorms = ModeFunction::kernel_norms(&ctx);
    let check = |slot: String, v: f64, zn: f64| -> Result<()> {
        if v.abs() > opts.orth_tol * gnorm * zn {
            return Err(Error::Precondition { slot, value: v });
        }
        Ok(())
    };
    check("Z_0".into(), proj.z0, znorms.z0)?;
    for (l, v) in proj.zl.iter().enumerate() {
        check(format!("Z_{}", l + 1), *v, znorms.zl[l])?;
    }
    let beta = proj.z / ((k2 - ctx.lambda0) * znorms.z * znorms.z);

    let fine = &ctx.grid;
    let coarse = &ctx.coarse;
    let pot_c: Vec<f64> = ctx.potential.iter().step_by(2).copied().collect();
    let pot_r = ctx.refined.sample(|r| ctx.bubble.potential(r));
    let mut phi = g.clone();
    phi.decay = if eps > 0.0 { g.decay + 2.0 } else { g.decay - 2.0 };
    for (bi, block) in g.blocks.iter().enumerate() {
        let m = block.harmonic.degree();
        for (q, gq) in block.profiles.iter().enumerate() {
            let ell = (m + 2 * q) as f64;
            if gq.iter().all(|v| *v == 0.0) {
                phi.blocks[bi].profiles[q] = vec![0.0; fine.len()];
                continue;
            }
            let last = fine.len() - 1;
            let rmax = fine.r[last];
            let rho = robin(ell, n, kappa, rmax)?;
            // slowly varying particular solution of the far field
            let cfar = k2 + ell * (ell + n - 2.0) / (rmax * rmax);
            let eta = if cfar > 0.0 {
                let qv = gq[last] / cfar;
                let dq = (gq[last] - gq[last - 1]) / (fine.r[last] - fine.r[last - 1]) / cfar;
                dq - rho * qv
            } else {
                0.0
            };
            let kernel = match (m, q) {
                (0, 0) => Some(&ctx.z0),
                (1, 0) => Some(&ctx.dw),
                _ => None,
            };
            let kernel_r = match (m, q) {
                (0, 0) => Some(ctx.refined.sample(|r| ctx.bubble.z0(r))),
                (1, 0) => Some(ctx.refined.sample(|r| ctx.bubble.dw(r))),
                _ => None,
            };
            // the same problem at spacings 2h, h, h/2
            let levels: [(&RadialGrid, &[f64], Vec<f64>, Option<Vec<f64>>); 3] = [
                (coarse, &pot_c, gq.iter().step_by(2).copied().collect(), kernel.map(|k| k.iter().step_by(2).copied().collect())),
                (fine, &ctx.potential, gq.clone(), kernel.cloned()),
                (&ctx.refined, &pot_r, refine_values(gq, block.parity(q)), kernel_r),
            ];
            let mut sols = Vec::with_capacity(3);
            for (grid, pot, gl, kl) in &levels {
                sols.push(match kl {
                    None => solve_profile(grid, pot, gl, ell, n, k2, rho, eta)?,
                    Some(k) => solve_bordered(grid, pot, gl, k, ell, n, k2, rho, eta)?,
                });
            }
            phi.blocks[bi].profiles[q] = richardson(&sols[0], &sols[1], &sols[2]);
        }
    }
    let raw = phi.project_kernel();
    let removed = raw.max_kernel();
    phi.remove_kernel();
    let gn = g.weighted_norm(eps, opts.rate, opts.delta);
    let pn = phi.weighted_norm(eps, opts.rate - 2.0, opts.delta);
    let ratio = if gn > 0.0 { pn / gn } else { 0.0 };
    Ok((phi, SolveDiagnostics { projections: proj, beta, ratio, removed }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bubble::DimensionParams;
    use crate::eigen::Eigenpair;
    use crate::modes::{Harmonic, ModeContext};
    use alloc::sync::Arc;
    use proptest::prelude::*;
    use std::sync::OnceLock;

    fn ctx() -> Arc<ModeContext> {
        static CTX: OnceLock<Arc<ModeContext>> = OnceLock::new();
        CTX.get_or_init(|| {
            let dims = DimensionParams::new(7).unwrap();
            let eig = Eigenpair::compute(dims).unwrap();
            Arc::new(ModeContext::with_defaults(dims, &eig))
        })
        .clone()
    }

    #[test]
    fn k_ratio_half_integer_order() {
        // K_{1/2}/K_{3/2} = x / (1 + x)
        for x in [0.3, 2.0, 40.0] {
            let v = bessel_k_ratio(1.5, x).unwrap();
            assert!((v - x / (1.0 + x)).abs() < 1e-12, "{x}: {v}");
        }
    }

    // psi = e^{-r^2} r^l Y_l for a few harmonic degrees, with -L psi formed analytically
    fn profile_and_rhs(l: f64, n: f64, k2: f64, pot: impl Fn(f64) -> f64) -> (impl Fn(f64) -> f64, impl Fn(f64) -> f64) {
        let u = move |r: f64| r.powf(l) * (-r * r).exp();
        let rhs = move |r: f64| {
            let e = (-r * r).exp();
            // Delta_l (r^l e^{-r^2}) = r^l e^{-r^2} (4 r^2 - 2(2l + N))
            let lap = r.powf(l) * e * (4.0 * r * r - 2.0 * (2.0 * l + n));
            -lap - pot(r) * u(r) + k2 * u(r)
        };
        (u, rhs)
    }

    #[test]
    fn manufactured_solution_recovered() {
        let c = ctx();
        let b = c.bubble;
        let n = 7.0;
        let (eps, a) = (0.05, 2.0);
        let k2 = eps * a;
        // zonal j = 2 part: r^2 C_2(t) is a degree-2 harmonic up to normalization
        let (u2, g2) = profile_and_rhs(2.0, n, k2, move |r| b.potential(r));
        let mut psi = ModeFunction::from_fn(&c, Harmonic::Radial, 30.0, move |r, t| u2(r) * crate::gegenbauer::gegenbauer(2, 2.5, t)[2]).unwrap();
        let mut g = ModeFunction::from_fn(&c, Harmonic::Radial, 30.0, move |r, t| g2(r) * crate::gegenbauer::gegenbauer(2, 2.5, t)[2]).unwrap();
        // a degree-1 block orthogonal to Z_l through its j = 2 mode and a radial part
        let (u3, g3) = profile_and_rhs(3.0, n, k2, move |r| b.potential(r));
        let mut e = vec![0.0; 6];
        e[1] = 1.0;
        e[3] = 0.5;
        let c2 = |t: f64| crate::gegenbauer::gegenbauer(2, 3.5, t)[2];
        psi.add_scaled(&ModeFunction::from_fn(&c, Harmonic::Linear(e.clone()), 30.0, move |r, t| u3(r) * c2(t)).unwrap(), 1.0);
        g.add_scaled(&ModeFunction::from_fn(&c, Harmonic::Linear(e), 30.0, move |r, t| g3(r) * c2(t)).unwrap(), 1.0);
        // radial part e^{-r^2}, made orthogonal to Z_0 by subtracting a multiple of a second profile
        let (u0, g0) = profile_and_rhs(0.0, n, k2, move |r| b.potential(r));
        // r^2 e^{-r^2} as a radial function
        let u0b = |r: f64| r * r * (-r * r).exp();
        let g0b = move |r: f64| {
            let lap = (-r * r).exp() * (2.0 * n - (2.0 * n + 8.0) * r * r + 4.0 * r.powi(4));
            -lap - b.potential(r) * u0b(r) + k2 * u0b(r)
        };
        let pa = ModeFunction::radial(&c, 30.0, c.grid.sample(&u0));
        let pb = ModeFunction::radial(&c, 30.0, c.grid.sample(&u0b));
        let s = pa.project_kernel().z0 / pb.project_kernel().z0;
        let ur = move |r: f64| u0(r) - s * u0b(r);
        let gr = move |r: f64| g0(r) - s * g0b(r);
        psi.add_scaled(&ModeFunction::radial(&c, 30.0, c.grid.sample(ur)), 1.0);
        g.add_scaled(&ModeFunction::radial(&c, 30.0, c.grid.sample(gr)), 1.0);

        let (phi, diag) = solve_linearized(&g, eps, a, &SolveOptions::default()).unwrap();
        let mut worst: f64 = 0.0;
        let pts = [[0.0; 7], [0.1, 0.2, -0.3, 0.0, 0.1, 0.2, 0.4], [1.0, -0.5, 0.2, 0.3, 0.0, 0.0, 0.8], [0.0, 0.0, 0.0, 0.0, 0.0, 1.5, 1.2]];
        for p in &pts {
            worst = worst.max((phi.eval(p) - psi.eval(p)).abs());
        }
        assert!(worst < 1e-6, "max error {worst}");
        assert!(diag.removed < 1e-6, "{}", diag.removed);
    }

    #[test]
    fn rejects_rhs_with_z0_component() {
        let c = ctx();
        let g = ModeFunction::radial(&c, 5.0, c.w.clone());
        match solve_linearized(&g, 0.1, 1.0, &SolveOptions::default()) {
            Err(Error::Precondition { slot, .. }) => assert_eq!(slot, "Z_0"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn resonance_is_reported() {
        let c = ctx();
        let g = ModeFunction::from_fn(&c, Harmonic::Radial, 30.0, |r, t| (-r * r).exp() * (t * t - 1.0 / 7.0)).unwrap();
        let a = c.lambda0 / 0.1;
        assert!(matches!(solve_linearized(&g, 0.1, a, &SolveOptions::default()), Err(Error::Numerical(_))));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(8))]
        #[test]
        fn solve_is_linear(s in -3.0f64..3.0) {
            let c = ctx();
            let g = ModeFunction::from_fn(&c, Harmonic::Radial, 30.0, |r, t| (-r * r).exp() * r * r * (t * t - 1.0 / 7.0)).unwrap();
            let (p1, _) = solve_linearized(&g, 0.02, 1.0, &SolveOptions::default()).unwrap();
            let (p2, _) = solve_linearized(&g.scaled(s), 0.02, 1.0, &SolveOptions::default()).unwrap();
            let x = [0.3, 0.1, 0.0, 0.2, 0.0, 0.1, 0.5];
            prop_assert!((p2.eval(&x) - s * p1.eval(&x)).abs() < 1e-10 * (1.0 + p1.eval(&x).abs()));
        }
    }
}
