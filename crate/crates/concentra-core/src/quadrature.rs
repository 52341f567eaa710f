//! Adaptive Gauss–Kronrod quadrature and exact angular integration over the
//! upper half of the unit sphere.

use num_traits::Float;
use crate::error::{Error, Result};
use alloc::boxed::Box;
use alloc::collections::BinaryHeap;
use alloc::vec;
use alloc::vec::Vec;
use core::cmp::Ordering;

const XGK: [f64; 8] = [
    0.991_455_371_120_812_639_206_854_697_526_329,
    0.949_107_912_342_758_524_526_189_684_047_851,
    0.864_864_423_359_769_072_789_712_788_640_926,
    0.741_531_185_599_394_439_863_864_773_280_788,
    0.586_087_235_467_691_130_294_144_845_693_013,
    0.405_845_151_377_397_166_906_606_412_076_961,
    0.207_784_955_007_898_467_600_689_403_773_245,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_224_963_732_008_058_970,
    0.063_092_092_629_978_553_290_700_663_189_204,
    0.104_790_010_322_250_183_839_876_322_541_518,
    0.140_653_259_715_525_918_745_189_590_510_238,
    0.169_004_726_639_267_902_826_583_426_598_550,
    0.190_350_578_064_785_409_913_256_402_421_014,
    0.204_432_940_075_298_892_414_161_999_234_649,
    0.209_482_141_084_727_828_012_999_174_891_714,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_693_270_611_432_679_082,
    0.279_705_391_489_276_667_901_467_771_423_780,
    0.381_830_050_505_118_944_950_369_775_488_975,
    0.417_959_183_673_469_387_755_102_040_816_327,
];

/// One 15-point Kronrod panel with its embedded 7-point Gauss estimate.
pub fn gk15(f: &dyn Fn(f64) -> f64, a: f64, b: f64) -> (f64, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut rk = fc * WGK[7];
    let mut rg = fc * WG[3];
    for i in 0..7 {
        let x = h * XGK[i];
        let s = f(c - x) + f(c + x);
        rk += WGK[i] * s;
        if i % 2 == 1 {
            rg += WG[i / 2] * s;
        }
    }
    (rk * h, ((rk - rg) * h).abs())
}

#[derive(Debug, Clone, Copy)]
pub struct QuadOptions {
    pub rel_tol: f64,
    pub abs_tol: f64,
    pub max_panels: usize,
    /// Upper end of the finite part for semi-infinite integrals.
    pub r_cut: f64,
}

impl Default for QuadOptions {
    fn default() -> Self {
        Self { rel_tol: 1e-12, abs_tol: 0.0, max_panels: 4000, r_cut: 1e3 }
    }
}

impl QuadOptions {
    pub fn with_rel_tol(rel_tol: f64) -> Self {
        Self { rel_tol, ..Self::default() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadResult {
    pub value: f64,
    pub error: f64,
    pub panels: usize,
}

struct Panel {
    a: f64,
    b: f64,
    value: f64,
    error: f64,
}

impl PartialEq for Panel {
    fn eq(&self, o: &Self) -> bool {
        self.error == o.error
    }
}
impl Eq for Panel {}
impl PartialOrd for Panel {
    fn partial_cmp(&self, o: &Self) -> Option<Ordering> {
        Some(self.cmp(o))
    }
}
impl Ord for Panel {
    fn cmp(&self, o: &Self) -> Ordering {
        self.error.partial_cmp(&o.error).unwrap_or(Ordering::Equal)
    }
}

/// Globally adaptive integration over `[a, b]` starting from the given breakpoints.
pub fn integrate_breaks(f: &dyn Fn(f64) -> f64, breaks: &[f64], opts: &QuadOptions) -> Result<QuadResult> {
    let mut heap = BinaryHeap::new();
    let (mut total, mut err) = (0.0, 0.0);
    for w in breaks.windows(2) {
        let (v, e) = gk15(f, w[0], w[1]);
        total += v;
        err += e;
        heap.push(Panel { a: w[0], b: w[1], value: v, error: e });
    }
    let mut panels = heap.len();
    loop {
        let target = opts.abs_tol.max(opts.rel_tol * total.abs());
        if err <= target {
            break;
        }
        if panels >= opts.max_panels {
            return Err(Error::Accuracy { achieved: err, requested: target });
        }
        let p = heap.pop().expect("heap non-empty");
        let m = 0.5 * (p.a + p.b);
        let (v1, e1) = gk15(f, p.a, m);
        let (v2, e2) = gk15(f, m, p.b);
        total += v1 + v2 - p.value;
        err += e1 + e2 - p.error;
        heap.push(Panel { a: p.a, b: m, value: v1, error: e1 });
        heap.push(Panel { a: m, b: p.b, value: v2, error: e2 });
        panels += 1;
        // recompute the running sums now and then to shed cancellation drift
        if panels % 256 == 0 {
            total = heap.iter().map(|p| p.value).sum();
            err = heap.iter().map(|p| p.error).sum();
        }
    }
    let total: f64 = heap.iter().map(|p| p.value).sum();
    let err: f64 = heap.iter().map(|p| p.error).sum();
    Ok(QuadResult { value: total, error: err, panels })
}

pub fn integrate(f: &dyn Fn(f64) -> f64, a: f64, b: f64, opts: &QuadOptions) -> Result<QuadResult> {
    integrate_breaks(f, &[a, b], opts)
}

/// `int_0^inf f(r) dr` for `|f| <= C r^{-decay}`, `decay > 1`.
///
/// The finite part runs to `opts.r_cut` on dyadic panels; the rest is the
/// power-law tail `f(R) R / (decay - 1)`, which also enters the error bound.
pub fn integrate_semi_infinite(f: &dyn Fn(f64) -> f64, decay: f64, opts: &QuadOptions) -> Result<QuadResult> {
    if !(decay > 1.0) {
        return Err(Error::Divergence { decay, needed: 1.0 });
    }
    let mut breaks = vec![0.0, 0.5, 1.0];
    let mut x = 1.0;
    while x < opts.r_cut {
        x = (2.0 * x).min(opts.r_cut);
        breaks.push(x);
    }
    let mut res = integrate_breaks(f, &breaks, opts)?;
    let r = opts.r_cut;
    let tail = f(r) * r / (decay - 1.0);
    res.value += tail;
    res.error += 0.1 * tail.abs();
    Ok(res)
}

/// `int_{S^{N-1}, x_N > 0} prod_i x_i^{a_i} dsigma`.
///
/// Zero when any tangential exponent is odd; otherwise
/// `prod Gamma((a_i+1)/2) / Gamma((|a|+N)/2)` (any parity of `a_N`).
pub fn half_sphere_monomial(a: &[u32]) -> f64 {
    let n = a.len();
    if a[..n - 1].iter().any(|&e| e % 2 == 1) {
        return 0.0;
    }
    let mut lg = 0.0;
    let mut total = 0.0;
    for &e in a {
        lg += libm::lgamma((e as f64 + 1.0) / 2.0);
        total += e as f64;
    }
    lg -= libm::lgamma((total + n as f64) / 2.0);
    lg.exp()
}

/// Area of the unit sphere `S^{d-1}` in `R^d`.
pub fn sphere_area(d: usize) -> f64 {
    let h = d as f64 / 2.0;
    2.0 * core::f64::consts::PI.powf(h) / libm::tgamma(h)
}

/// One term `radial(r) * prod_i (xi_i / r)^{mono_i}` of a half-space integrand.
pub struct Term<'a> {
    pub mono: Vec<u32>,
    pub radial: Box<dyn Fn(f64) -> f64 + 'a>,
}

impl<'a> Term<'a> {
    pub fn new(mono: Vec<u32>, radial: impl Fn(f64) -> f64 + 'a) -> Self {
        Self { mono, radial: Box::new(radial) }
    }

    /// Monomial given as `(index, exponent)` pairs; an empty list is the constant 1.
    pub fn axis(dim: usize, powers: &[(usize, u32)], radial: impl Fn(f64) -> f64 + 'a) -> Self {
        let mut mono = vec![0; dim];
        for &(i, e) in powers {
            mono[i] += e;
        }
        Self::new(mono, radial)
    }
}

/// A sum of harmonic-polynomial-times-radial terms on `R^N_+`, with the
/// decay order `|F| <= C |xi|^{-decay}` declared by the caller.
pub struct HalfspaceIntegrand<'a> {
    pub dim: usize,
    pub decay: f64,
    pub terms: Vec<Term<'a>>,
}

impl<'a> HalfspaceIntegrand<'a> {
    pub fn new(dim: usize, decay: f64) -> Self {
        Self { dim, decay, terms: Vec::new() }
    }

    pub fn push(mut self, t: Term<'a>) -> Self {
        self.terms.push(t);
        self
    }
}

/// `int_{R^N_+} F`: exact angular moments times adaptive radial quadrature.
pub fn quad_halfspace(f: &HalfspaceIntegrand<'_>, opts: &QuadOptions) -> Result<QuadResult> {
    let n = f.dim as f64;
    if !(f.decay > n) {
        return Err(Error::Divergence { decay: f.decay, needed: n });
    }
    let weights: Vec<f64> = f.terms.iter().map(|t| half_sphere_monomial(&t.mono)).collect();
    if weights.iter().all(|w| *w == 0.0) {
        return Ok(QuadResult { value: 0.0, error: 0.0, panels: 0 });
    }
    let radial = |r: f64| {
        let mut s = 0.0;
        for (t, w) in f.terms.iter().zip(&weights) {
            if *w != 0.0 {
                s += w * (t.radial)(r);
            }
        }
        s * r.powi(f.dim as i32 - 1)
    };
    integrate_semi_infinite(&radial, f.decay - (n - 1.0), opts)
}

/// Gauss–Legendre nodes and weights on `[-1, 1]`.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    let nf = n as f64;
    for i in 0..(n + 1) / 2 {
        let mut z = (core::f64::consts::PI * (i as f64 + 0.75) / (nf + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, z);
            for k in 2..=n {
                let kf = k as f64;
                let p2 = ((2.0 * kf - 1.0) * z * p1 - (kf - 1.0) * p0) / kf;
                p0 = p1;
                p1 = p2;
            }
            let pn = if n == 0 { 1.0 } else if n == 1 { z } else { p1 };
            let pm = if n == 1 { 1.0 } else { p0 };
            dp = nf * (z * pn - pm) / (z * z - 1.0);
            let dz = pn / dp;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        x[i] = -z;
        x[n - 1 - i] = z;
        w[i] = 2.0 / ((1.0 - z * z) * dp * dp);
        w[n - 1 - i] = w[i];
    }
    (x, w)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bubble::{Bubble, DimensionParams};
    use core::f64::consts::PI;

    #[test]
    fn gk_polynomial_exact() {
        let (v, _) = gk15(&|x| x.powi(20), -1.0, 1.0);
        assert!((v - 2.0 / 21.0).abs() < 1e-14);
    }

    #[test]
    fn semi_infinite_power_tail() {
        // int_0^inf 1/(1+r)^3 = 1/2
        let r = integrate_semi_infinite(&|r| (1.0 + r).powi(-3), 3.0, &QuadOptions::default()).unwrap();
        assert!((r.value - 0.5).abs() < 1e-9, "{}", r.value);
        assert!(integrate_semi_infinite(&|r| 1.0 / (1.0 + r), 1.0, &QuadOptions::default()).is_err());
    }

    #[test]
    fn accuracy_error_when_budget_exhausted() {
        let opts = QuadOptions { rel_tol: 1e-15, max_panels: 3, ..QuadOptions::default() };
        let e = integrate(&|x: f64| x.abs().sqrt(), -1.0, 1.0, &opts).unwrap_err();
        assert!(matches!(e, Error::Accuracy { .. }));
    }

    #[test]
    fn sphere_moments() {
        // full half-sphere area
        for d in 2..10 {
            let m = half_sphere_monomial(&vec![0; d]);
            assert!((m - sphere_area(d) / 2.0).abs() < 1e-13 * m);
        }
        // <x_1^2> over the sphere is 1/d
        let mut a = vec![0u32; 7];
        a[0] = 2;
        assert!((half_sphere_monomial(&a) / (sphere_area(7) / 2.0) - 1.0 / 7.0).abs() < 1e-14);
        a[0] = 1;
        assert_eq!(half_sphere_monomial(&a), 0.0);
        assert!((sphere_area(3) - 4.0 * PI).abs() < 1e-13);
    }

    #[test]
    fn legendre_rule() {
        let (x, w) = gauss_legendre(20);
        let s: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(38)).sum();
        assert!((s - 2.0 / 39.0).abs() < 1e-14);
    }

    #[test]
    fn w0_squared_matches_radial_oracle() {
        // frozen scipy value of int_{R^7_+} w0^2
        let b = Bubble::new(DimensionParams::new(7).unwrap());
        let f = HalfspaceIntegrand::new(7, 10.0).push(Term::axis(7, &[], |r| b.w(r).powi(2)));
        let v = quad_halfspace(&f, &QuadOptions::default()).unwrap().value;
        assert!((v / 7353.57233168287 - 1.0).abs() < 1e-8);
    }

    #[test]
    fn odd_integrand_vanishes() {
        let b = Bubble::new(DimensionParams::new(7).unwrap());
        let f = HalfspaceIntegrand::new(7, 8.0).push(Term::axis(7, &[(0, 1)], |r| b.dw(r)));
        assert_eq!(quad_halfspace(&f, &QuadOptions::default()).unwrap().value, 0.0);
    }

    #[test]
    fn slow_decay_is_rejected() {
        let f = HalfspaceIntegrand::new(7, 6.0).push(Term::axis(7, &[], |r| (1.0 + r * r).powi(-3)));
        assert!(matches!(quad_halfspace(&f, &QuadOptions::default()), Err(Error::Divergence { .. })));
    }
}
