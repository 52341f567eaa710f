//! Integral constants of the bubble and the identities tying them together.

use num_traits::Float;
use crate::bubble::{Bubble, DimensionParams};
use crate::eigen::Eigenpair;
use crate::error::Result;
use crate::quadrature::{quad_halfspace, HalfspaceIntegrand, QuadOptions, Term};
use alloc::string::String;
use alloc::vec::Vec;

/// Half-space integrals of the bubble family.
#[derive(Debug, Clone, PartialEq)]
pub struct ConstantsTable {
    pub dims: DimensionParams,
    /// `(1/2) int xi_N |grad w0|^2 - (N-2)/(2N) int xi_N w0^{2N/(N-2)}`.
    pub a0_frak: f64,
    /// `int xi_N |d_1 w0|^2`.
    pub a1_frak: f64,
    /// `int w0^2`.
    pub b: f64,
    /// `int |d_1 w0|^2`.
    pub c0: f64,
    /// `int Z_0^2`.
    pub a: f64,
    /// `int Z_1^2`.
    pub c: f64,
    /// `int Z^2` over the half-space.
    pub d: f64,
    /// `int_{R^N} Z^2` (the normalization, 1).
    pub d_full: f64,
    pub lambda0: f64,
    /// `C * lambda0`.
    pub lambda0_bar: f64,
    /// Largest relative change of any entry when the quadrature tolerance is tightened 100x.
    pub refinement_change: f64,
    pub rel_tol: f64,
}

struct Raw {
    a0: f64,
    a1: f64,
    b: f64,
    c0: f64,
    a: f64,
    d: f64,
}

fn raw(bb: &Bubble, eig: &Eigenpair, opts: &QuadOptions) -> Result<Raw> {
    let n = bb.dims.dim;
    let nf = n as f64;
    let last = n - 1;
    let q = |f: HalfspaceIntegrand<'_>| quad_halfspace(&f, opts).map(|r| r.value);
    let a1 = q(HalfspaceIntegrand::new(n, 2.0 * nf - 3.0)
        .push(Term::axis(n, &[(last, 1), (0, 2)], |r| r * bb.dw(r).powi(2))))?;
    let grad_sq = q(HalfspaceIntegrand::new(n, 2.0 * nf - 3.0)
        .push(Term::axis(n, &[(last, 1)], |r| r * bb.dw(r).powi(2))))?;
    let crit = q(HalfspaceIntegrand::new(n, 2.0 * nf - 1.0)
        .push(Term::axis(n, &[(last, 1)], |r| r * bb.w(r).powf(2.0 * nf / (nf - 2.0)))))?;
    let a0 = 0.5 * grad_sq - (nf - 2.0) / (2.0 * nf) * crit;
    let b = q(HalfspaceIntegrand::new(n, 2.0 * nf - 4.0).push(Term::axis(n, &[], |r| bb.w(r).powi(2))))?;
    let c0 = q(HalfspaceIntegrand::new(n, 2.0 * nf - 2.0).push(Term::axis(n, &[(0, 2)], |r| bb.dw(r).powi(2))))?;
    let a = q(HalfspaceIntegrand::new(n, 2.0 * nf - 4.0).push(Term::axis(n, &[], |r| bb.z0(r).powi(2))))?;
    let d_opts = QuadOptions { r_cut: eig.opts.r_max * 2.0, ..*opts };
    let d = quad_halfspace(
        &HalfspaceIntegrand::new(n, 4.0 * nf).push(Term::axis(n, &[], |r| eig.eval(r).powi(2))),
        &d_opts,
    )?
    .value;
    Ok(Raw { a0, a1, b, c0, a, d })
}

/// All constants by half-space quadrature, with a refinement study.
pub fn bubble_constants(dims: DimensionParams, eig: &Eigenpair, opts: &QuadOptions) -> Result<ConstantsTable> {
    let bb = Bubble::new(dims);
    let r1 = raw(&bb, eig, opts)?;
    let tight = QuadOptions { rel_tol: opts.rel_tol * 1e-2, max_panels: opts.max_panels * 4, ..*opts };
    let r2 = raw(&bb, eig, &tight)?;
    let pairs = [(r1.a0, r2.a0), (r1.a1, r2.a1), (r1.b, r2.b), (r1.c0, r2.c0), (r1.a, r2.a), (r1.d, r2.d)];
    let refinement_change = pairs.iter().map(|(x, y)| ((x - y) / y).abs()).fold(0.0, f64::max);
    Ok(ConstantsTable {
        dims,
        a0_frak: r2.a0,
        a1_frak: r2.a1,
        b: r2.b,
        c0: r2.c0,
        a: r2.a,
        c: r2.c0,
        d: r2.d,
        d_full: 2.0 * r2.d,
        lambda0: eig.lambda0,
        lambda0_bar: r2.c0 * eig.lambda0,
        refinement_change,
        rel_tol: tight.rel_tol,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct IdentityCheck {
    pub name: String,
    pub lhs: f64,
    pub rhs: f64,
    /// `|lhs - rhs|` relative to `|rhs|` (to the scale of the terms when `rhs = 0`).
    pub residual: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct IdentityReport {
    pub dim: usize,
    pub tol: f64,
    pub checks: Vec<IdentityCheck>,
}

impl IdentityReport {
    pub fn all_pass(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }
}

/// The integral identities behind the choice of the concentration scale.
pub fn verify_identities(dims: DimensionParams, tol: f64) -> Result<IdentityReport> {
    let bb = Bubble::new(dims);
    let n = dims.dim;
    let nf = n as f64;
    let last = n - 1;
    let opts = QuadOptions::with_rel_tol(1e-13);
    let q = |f: HalfspaceIntegrand<'_>| quad_halfspace(&f, &opts).map(|r| r.value);
    let w = |r: f64| bb.w(r);
    let dw = |r: f64| bb.dw(r);
    // d_ij w0 = (w'' - w'/r) x_i x_j / r^2 + (w'/r) delta_ij
    let hc = |r: f64| bb.d2w(r) - bb.dw_over_r(r);

    let a1 = q(HalfspaceIntegrand::new(n, 2.0 * nf - 3.0).push(Term::axis(n, &[(last, 1), (0, 2)], |r| r * dw(r).powi(2))))?;
    let grad_sq = q(HalfspaceIntegrand::new(n, 2.0 * nf - 3.0).push(Term::axis(n, &[(last, 1)], |r| r * dw(r).powi(2))))?;
    let crit = q(HalfspaceIntegrand::new(n, 2.0 * nf - 1.0)
        .push(Term::axis(n, &[(last, 1)], |r| r * w(r).powf(2.0 * nf / (nf - 2.0)))))?;
    let a0 = 0.5 * grad_sq - (nf - 2.0) / (2.0 * nf) * crit;
    let dn_sq = q(HalfspaceIntegrand::new(n, 2.0 * nf - 3.0).push(Term::axis(n, &[(last, 3)], |r| r * dw(r).powi(2))))?;
    let b = q(HalfspaceIntegrand::new(n, 2.0 * nf - 4.0).push(Term::axis(n, &[], |r| w(r).powi(2))))?;
    let wz0 = q(HalfspaceIntegrand::new(n, 2.0 * nf - 4.0).push(Term::axis(n, &[], |r| w(r) * bb.z0(r))))?;
    let c0 = q(HalfspaceIntegrand::new(n, 2.0 * nf - 2.0).push(Term::axis(n, &[(0, 2)], |r| dw(r).powi(2))))?;
    // xi_2 d_1 w0 d_12 w0 = r w' (w'' - w'/r) w_1^2 w_2^2
    let cross = q(HalfspaceIntegrand::new(n, 2.0 * nf - 2.0)
        .push(Term::axis(n, &[(0, 2), (1, 2)], |r| r * dw(r) * hc(r))))?;
    // xi_N^2 d_N w0 d_NN w0
    let nnn = q(HalfspaceIntegrand::new(n, 2.0 * nf - 3.0)
        .push(Term::axis(n, &[(last, 5)], |r| r * r * dw(r) * hc(r)))
        .push(Term::axis(n, &[(last, 3)], |r| r * dw(r).powi(2))))?;
    // xi_N^2 d_N w0 d_11 w0
    let n11 = q(HalfspaceIntegrand::new(n, 2.0 * nf - 3.0)
        .push(Term::axis(n, &[(last, 3), (0, 2)], |r| r * r * dw(r) * hc(r)))
        .push(Term::axis(n, &[(last, 3)], |r| r * dw(r).powi(2))))?;

    let mut checks = Vec::new();
    let mut push = |name: &str, lhs: f64, rhs: f64, scale: f64| {
        let residual = (lhs - rhs).abs() / scale.abs();
        checks.push(IdentityCheck { name: name.into(), lhs, rhs, residual, pass: residual <= tol });
    };
    push("A0 = 2 A1", a0, 2.0 * a1, 2.0 * a1);
    push("int xi_N |grad w0|^2 = (N+1) A1", grad_sq, (nf + 1.0) * a1, (nf + 1.0) * a1);
    let k = nf * (nf - 3.0) / (nf - 2.0);
    push("int xi_N w0^(2N/(N-2)) = N(N-3)/(N-2) A1", crit, k * a1, k * a1);
    push("int xi_N |d_N w0|^2 = 2 A1", dn_sq, 2.0 * a1, 2.0 * a1);
    push("int w0 Z0 = -int w0^2", wz0, -b, b);
    push("int xi_j d_i w0 d_ij w0 = -C0/2", cross, -0.5 * c0, 0.5 * c0);
    push("int xi_N^2 d_N w0 d_NN w0 = -2 A1", nnn, -2.0 * a1, 2.0 * a1);
    push("int xi_N^2 d_N w0 d_11 w0 = A1", n11, a1, a1);
    Ok(IdentityReport { dim: n, tol, checks })
}
