//! Functions on the half-space `R^N_+` that are even in `xi_N`, stored as
//! sums of blocks `Q(xi_bar) / r^m * sum_j u_j(r) C_j^{a_m}(t)` with
//! `t = xi_N / r`, `a_m = m + (N-2)/2` and `Q` a harmonic polynomial of
//! degree `m <= 2` in the tangential variables. Every term of a block is a
//! spherical harmonic of degree `m + j` times a radial profile.

use num_traits::Float;
use crate::bubble::{Bubble, DimensionParams};
use crate::eigen::Eigenpair;
use crate::error::{Error, Result};
use crate::gegenbauer::{gegenbauer, AngularRule};
use crate::grid::{GridSpec, RadialGrid};
use crate::quadrature::sphere_area;
use alloc::format;
use alloc::sync::Arc;
use alloc::vec;
use alloc::vec::Vec;

/// Tangential harmonic factor of a block.
#[derive(Debug, Clone, PartialEq)]
pub enum Harmonic {
    Radial,
    /// `c . xi_bar`, `c` of length `N - 1`.
    Linear(Vec<f64>),
    /// `xi_bar^T S xi_bar` with `S` symmetric and traceless, row-major.
    Quadratic(Vec<f64>),
}

impl Harmonic {
    pub fn degree(&self) -> usize {
        match self {
            Harmonic::Radial => 0,
            Harmonic::Linear(_) => 1,
            Harmonic::Quadratic(_) => 2,
        }
    }

    pub fn value(&self, xb: &[f64]) -> f64 {
        match self {
            Harmonic::Radial => 1.0,
            Harmonic::Linear(c) => c.iter().zip(xb).map(|(a, b)| a * b).sum(),
            Harmonic::Quadratic(s) => {
                let d = xb.len();
                let mut v = 0.0;
                for i in 0..d {
                    for j in 0..d {
                        v += s[i * d + j] * xb[i] * xb[j];
                    }
                }
                v
            }
        }
    }

    /// `int_{S^{d-1}} Q Q'` with `d = N - 1`; zero across degrees.
    pub fn sphere_inner(&self, other: &Harmonic, d: usize) -> f64 {
        let area = sphere_area(d);
        let df = d as f64;
        match (self, other) {
            (Harmonic::Radial, Harmonic::Radial) => area,
            (Harmonic::Linear(a), Harmonic::Linear(b)) => area * dot(a, b) / df,
            (Harmonic::Quadratic(a), Harmonic::Quadratic(b)) => {
                // E[(x^T A x)(x^T B x)] = 2 tr(AB) / (d (d+2)) for traceless symmetric A, B
                let mut tr = 0.0;
                for i in 0..d {
                    for j in 0..d {
                        tr += a[i * d + j] * b[j * d + i];
                    }
                }
                area * 2.0 * tr / (df * (df + 2.0))
            }
            _ => 0.0,
        }
    }

    fn check(&self, d: usize) -> Result<()> {
        match self {
            Harmonic::Radial => Ok(()),
            Harmonic::Linear(c) if c.len() == d => Ok(()),
            Harmonic::Quadratic(s) if s.len() == d * d => {
                let tr: f64 = (0..d).map(|i| s[i * d + i]).sum();
                let scale = s.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(1e-300);
                let asym = (0..d)
                    .flat_map(|i| (0..d).map(move |j| (i, j)))
                    .fold(0.0f64, |m, (i, j)| m.max((s[i * d + j] - s[j * d + i]).abs()));
                if tr.abs() > 1e-12 * scale || asym > 1e-12 * scale {
                    return Err(Error::Representation("quadratic factor must be symmetric and traceless".into()));
                }
                Ok(())
            }
            _ => Err(Error::Representation(format!("harmonic factor has wrong length for N - 1 = {d}"))),
        }
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Discretization shared by every mode function of one computation.
#[derive(Debug, Clone)]
pub struct ModeContext {
    pub dims: DimensionParams,
    pub bubble: Bubble,
    pub grid: RadialGrid,
    pub coarse: RadialGrid,
    pub refined: RadialGrid,
    /// Highest (even) Gegenbauer index kept.
    pub j_max: usize,
    /// Angular rules for `m = 0, 1, 2`.
    pub rules: [AngularRule; 3],
    pub w: Vec<f64>,
    pub dw: Vec<f64>,
    pub d2w: Vec<f64>,
    pub potential: Vec<f64>,
    pub z0: Vec<f64>,
    pub z: Vec<f64>,
    pub lambda0: f64,
}

impl ModeContext {
    pub fn new(dims: DimensionParams, eig: &Eigenpair, spec: GridSpec, j_max: usize, angular_nodes: usize) -> Self {
        let grid = RadialGrid::new(spec);
        let coarse = grid.coarse();
        let refined = grid.refined();
        let bubble = Bubble::new(dims);
        let j_max = j_max - j_max % 2;
        let a0 = dims.half_nm2;
        let rules = [
            AngularRule::new(a0, j_max, angular_nodes),
            AngularRule::new(a0 + 1.0, j_max, angular_nodes),
            AngularRule::new(a0 + 2.0, j_max, angular_nodes),
        ];
        Self {
            dims,
            bubble,
            w: grid.sample(|r| bubble.w(r)),
            dw: grid.sample(|r| bubble.dw(r)),
            d2w: grid.sample(|r| bubble.d2w(r)),
            potential: grid.sample(|r| bubble.potential(r)),
            z0: grid.sample(|r| bubble.z0(r)),
            z: grid.sample(|r| eig.eval(r)),
            lambda0: eig.lambda0,
            grid,
            coarse,
            refined,
            j_max,
            rules,
        }
    }

    pub fn with_defaults(dims: DimensionParams, eig: &Eigenpair) -> Self {
        Self::new(dims, eig, GridSpec::default(), 16, 48)
    }

    pub fn modes(&self) -> usize {
        self.j_max / 2 + 1
    }

    /// `int_0^inf r^{N-1} u v dr`, with a power-law tail estimate past the grid.
    pub fn moment(&self, u: &[f64], v: &[f64]) -> f64 {
        let g = &self.grid;
        let n = self.dims.n();
        let f: Vec<f64> = (0..g.len()).map(|i| g.r[i].powf(n - 1.0) * u[i] * v[i]).collect();
        let body = g.integrate(&f);
        let last = g.len() - 1;
        let back = last - 8;
        let (f1, f0) = (f[last], f[back]);
        if f1 == 0.0 || f0 == 0.0 || f1.signum() != f0.signum() {
            return body;
        }
        let q = -(f1 / f0).ln() / (g.r[last] / g.r[back]).ln();
        if q > 1.5 {
            body + f1 * g.r[last] / (q - 1.0)
        } else {
            body
        }
    }

    /// `int_{S^{N-1}_+} |Q C_j^{a_m}|^2`-type factor for blocks of degree `m`.
    pub fn angular_factor(&self, a: &Harmonic, b: &Harmonic, q: usize) -> f64 {
        let m = a.degree();
        0.5 * a.sphere_inner(b, self.dims.dim - 1) * self.rules[m].norms[q]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Block {
    pub harmonic: Harmonic,
    /// `profiles[q]` multiplies `C_{2q}`.
    pub profiles: Vec<Vec<f64>>,
}

impl Block {
    /// Parity of profile `q` across `r = 0`.
    pub fn parity(&self, _q: usize) -> f64 {
        if self.harmonic.degree() % 2 == 1 {
            -1.0
        } else {
            1.0
        }
    }
}

/// Projections on `Z_0`, `Z_1 .. Z_{N-1}` and the eigenfunction `Z`.
#[derive(Debug, Clone, PartialEq)]
pub struct KernelProjections {
    pub z0: f64,
    pub zl: Vec<f64>,
    pub z: f64,
}

impl KernelProjections {
    pub fn max_kernel(&self) -> f64 {
        self.zl.iter().fold(self.z0.abs(), |m, v| m.max(v.abs()))
    }
}

/// Node values of a zonal (`m = 0`) function and its `(r, t)` derivatives,
/// indexed `[radial node][angular node]`.
#[derive(Debug, Clone)]
pub struct ZonalNodes {
    pub f: Vec<Vec<f64>>,
    pub fr: Vec<Vec<f64>>,
    pub frr: Vec<Vec<f64>>,
    pub ft: Vec<Vec<f64>>,
    pub ftt: Vec<Vec<f64>>,
    pub frt: Vec<Vec<f64>>,
}

impl ZonalNodes {
    pub fn zeros(nr: usize, nt: usize) -> Self {
        let z = vec![vec![0.0; nt]; nr];
        Self { f: z.clone(), fr: z.clone(), frr: z.clone(), ft: z.clone(), ftt: z.clone(), frt: z }
    }
}

#[derive(Debug, Clone)]
pub struct ModeFunction {
    pub ctx: Arc<ModeContext>,
    /// Declared algebraic decay order at infinity.
    pub decay: f64,
    pub blocks: Vec<Block>,
}

impl ModeFunction {
    pub fn zero(ctx: &Arc<ModeContext>, decay: f64) -> Self {
        Self { ctx: ctx.clone(), decay, blocks: Vec::new() }
    }

    /// Radial function with profile `u` on the grid.
    pub fn radial(ctx: &Arc<ModeContext>, decay: f64, u: Vec<f64>) -> Self {
        let mut profiles = vec![vec![0.0; ctx.grid.len()]; ctx.modes()];
        profiles[0] = u;
        Self { ctx: ctx.clone(), decay, blocks: vec![Block { harmonic: Harmonic::Radial, profiles }] }
    }

    /// `Q(xi_bar)/r^m * f(r, t)`, projected on the angular modes of degree `m`.
    /// `f` is never called at `r = 0`.
    pub fn from_fn(ctx: &Arc<ModeContext>, harmonic: Harmonic, decay: f64, f: impl Fn(f64, f64) -> f64) -> Result<Self> {
        harmonic.check(ctx.dims.dim - 1)?;
        let m = harmonic.degree();
        let rule = &ctx.rules[m];
        let nq = ctx.modes();
        let nr = ctx.grid.len();
        let mut profiles = vec![vec![0.0; nr]; nq];
        let mut vals = vec![0.0; rule.len()];
        let mut coef = vec![0.0; nq];
        for i in 1..nr {
            let r = ctx.grid.r[i];
            for (k, v) in vals.iter_mut().enumerate() {
                *v = f(r, rule.t[k]);
            }
            rule.project(&vals, &mut coef);
            for q in 0..nq {
                profiles[q][i] = coef[q];
            }
        }
        let mut b = Block { harmonic, profiles };
        fill_origin(&mut b);
        Ok(Self { ctx: ctx.clone(), decay, blocks: vec![b] })
    }

    /// Inverse of [`ModeFunction::zonal_nodes`]: projects node values (rows `i >= 1`).
    pub fn from_zonal_nodes(ctx: &Arc<ModeContext>, decay: f64, vals: &[Vec<f64>]) -> Self {
        let rule = &ctx.rules[0];
        let nq = ctx.modes();
        let nr = ctx.grid.len();
        let mut profiles = vec![vec![0.0; nr]; nq];
        let mut coef = vec![0.0; nq];
        for i in 1..nr {
            rule.project(&vals[i], &mut coef);
            for q in 0..nq {
                profiles[q][i] = coef[q];
            }
        }
        let mut b = Block { harmonic: Harmonic::Radial, profiles };
        fill_origin(&mut b);
        Self { ctx: ctx.clone(), decay, blocks: vec![b] }
    }

    pub fn is_zonal(&self) -> bool {
        self.blocks.iter().all(|b| b.harmonic == Harmonic::Radial)
    }

    pub fn zonal_block(&self) -> Option<&Block> {
        self.blocks.iter().find(|b| b.harmonic == Harmonic::Radial)
    }

    /// Zonal profiles, zero when there is no zonal block.
    pub fn zonal_profiles(&self) -> Vec<Vec<f64>> {
        match self.zonal_block() {
            Some(b) => b.profiles.clone(),
            None => vec![vec![0.0; self.ctx.grid.len()]; self.ctx.modes()],
        }
    }

    pub fn scale(&mut self, s: f64) {
        for b in &mut self.blocks {
            for u in &mut b.profiles {
                for v in u.iter_mut() {
                    *v *= s;
                }
            }
        }
    }

    pub fn scaled(&self, s: f64) -> Self {
        let mut out = self.clone();
        out.scale(s);
        out
    }

    /// `self += s * other`.
    pub fn add_scaled(&mut self, other: &ModeFunction, s: f64) {
        for ob in &other.blocks {
            match self.blocks.iter_mut().find(|b| b.harmonic == ob.harmonic) {
                Some(b) => {
                    for (u, v) in b.profiles.iter_mut().zip(&ob.profiles) {
                        for (a, c) in u.iter_mut().zip(v) {
                            *a += s * c;
                        }
                    }
                }
                None => {
                    let mut nb = ob.clone();
                    for u in &mut nb.profiles {
                        for a in u.iter_mut() {
                            *a *= s;
                        }
                    }
                    self.blocks.push(nb);
                }
            }
        }
        self.decay = self.decay.min(other.decay);
    }

    pub fn value(&self, xi: &[f64]) -> Result<f64> {
        let n = self.ctx.dims.dim;
        if xi.len() != n {
            return Err(Error::Domain(format!("point has length {}, expected {n}", xi.len())));
        }
        Ok(self.eval(xi))
    }

    pub fn eval(&self, xi: &[f64]) -> f64 {
        let ctx = &*self.ctx;
        let n = ctx.dims.dim;
        let r = xi.iter().map(|v| v * v).sum::<f64>().sqrt();
        if r > ctx.grid.r_max() {
            return 0.0;
        }
        let t = if r > 0.0 { xi[n - 1].abs() / r } else { 1.0 };
        let mut s = 0.0;
        for b in &self.blocks {
            let m = b.harmonic.degree();
            let q = if m == 0 {
                1.0
            } else if r == 0.0 {
                continue;
            } else {
                let xb: Vec<f64> = xi[..n - 1].iter().map(|v| v / r).collect();
                b.harmonic.value(&xb)
            };
            let c = gegenbauer(ctx.j_max, ctx.rules[m].alpha, t);
            let mut acc = 0.0;
            for (qi, u) in b.profiles.iter().enumerate() {
                acc += ctx.grid.interpolate(u, r) * c[2 * qi];
            }
            s += q * acc;
        }
        s
    }

    /// Half-space `L^2` inner product.
    pub fn inner(&self, other: &ModeFunction) -> f64 {
        let ctx = &*self.ctx;
        let mut s = 0.0;
        for a in &self.blocks {
            for b in &other.blocks {
                if a.harmonic.degree() != b.harmonic.degree() {
                    continue;
                }
                for q in 0..a.profiles.len().min(b.profiles.len()) {
                    let f = ctx.angular_factor(&a.harmonic, &b.harmonic, q);
                    if f != 0.0 {
                        s += f * ctx.moment(&a.profiles[q], &b.profiles[q]);
                    }
                }
            }
        }
        s
    }

    pub fn l2_norm(&self) -> f64 {
        self.inner(self).max(0.0).sqrt()
    }

    pub fn project_kernel(&self) -> KernelProjections {
        let ctx = &*self.ctx;
        let n = ctx.dims.dim;
        let a0 = ctx.angular_factor(&Harmonic::Radial, &Harmonic::Radial, 0);
        let mut out = KernelProjections { z0: 0.0, zl: vec![0.0; n - 1], z: 0.0 };
        for b in &self.blocks {
            match &b.harmonic {
                Harmonic::Radial => {
                    out.z0 += a0 * ctx.moment(&b.profiles[0], &ctx.z0);
                    out.z += a0 * ctx.moment(&b.profiles[0], &ctx.z);
                }
                Harmonic::Linear(c) => {
                    let m = ctx.moment(&b.profiles[0], &ctx.dw);
                    let f = 0.5 * sphere_area(n - 1) / (n as f64 - 1.0) * ctx.rules[1].norms[0];
                    for (l, cl) in c.iter().enumerate() {
                        out.zl[l] += cl * f * m;
                    }
                }
                Harmonic::Quadratic(_) => {}
            }
        }
        out
    }

    /// `L^2` norms of `Z_0`, `Z_l` and `Z` on the half-space.
    pub fn kernel_norms(ctx: &ModeContext) -> KernelProjections {
        let n = ctx.dims.dim;
        let a0 = ctx.angular_factor(&Harmonic::Radial, &Harmonic::Radial, 0);
        let fl = 0.5 * sphere_area(n - 1) / (n as f64 - 1.0) * ctx.rules[1].norms[0];
        let zl = (fl * ctx.moment(&ctx.dw, &ctx.dw)).sqrt();
        KernelProjections {
            z0: (a0 * ctx.moment(&ctx.z0, &ctx.z0)).sqrt(),
            zl: vec![zl; n - 1],
            z: (a0 * ctx.moment(&ctx.z, &ctx.z)).sqrt(),
        }
    }

    /// Removes the components along `Z_0` and every `Z_l`.
    pub fn remove_kernel(&mut self) {
        let ctx = self.ctx.clone();
        let z0z0 = ctx.moment(&ctx.z0, &ctx.z0);
        let dwdw = ctx.moment(&ctx.dw, &ctx.dw);
        for b in &mut self.blocks {
            let (k, kk) = match b.harmonic {
                Harmonic::Radial => (&ctx.z0, z0z0),
                Harmonic::Linear(_) => (&ctx.dw, dwdw),
                Harmonic::Quadratic(_) => continue,
            };
            let c = ctx.moment(&b.profiles[0], k) / kk;
            for (u, kv) in b.profiles[0].iter_mut().zip(k) {
                *u -= c * kv;
            }
        }
    }

    /// `Delta` applied block by block in coefficient space.
    pub fn laplacian(&self) -> Self {
        let ctx = &*self.ctx;
        let g = &ctx.grid;
        let n = ctx.dims.n();
        let mut out = self.clone();
        out.decay = self.decay + 2.0;
        for (b, ob) in self.blocks.iter().zip(out.blocks.iter_mut()) {
            let m = b.harmonic.degree();
            for (q, u) in b.profiles.iter().enumerate() {
                let l = (m + 2 * q) as f64;
                let (d1, d2) = g.derivatives(u, b.parity(q));
                let o = &mut ob.profiles[q];
                o[0] = if l == 0.0 { n * d2[0] } else { 0.0 };
                for i in 1..g.len() {
                    let r = g.r[i];
                    o[i] = d2[i] + (n - 1.0) / r * d1[i] - l * (l + n - 2.0) / (r * r) * u[i];
                }
            }
        }
        out
    }

    /// Node values and `(r, t)` derivatives of the zonal part.
    pub fn zonal_nodes(&self) -> Result<ZonalNodes> {
        if !self.is_zonal() {
            return Err(Error::Representation("nodal evaluation needs a zonal function".into()));
        }
        let ctx = &*self.ctx;
        let rule = &ctx.rules[0];
        let nr = ctx.grid.len();
        let nt = rule.len();
        let mut out = ZonalNodes::zeros(nr, nt);
        let Some(b) = self.zonal_block() else {
            return Ok(out);
        };
        let nq = b.profiles.len();
        let mut d1s = Vec::with_capacity(nq);
        let mut d2s = Vec::with_capacity(nq);
        for (q, u) in b.profiles.iter().enumerate() {
            let (d1, d2) = ctx.grid.derivatives(u, b.parity(q));
            d1s.push(d1);
            d2s.push(d2);
        }
        let mut c0 = vec![0.0; nq];
        let mut c1 = vec![0.0; nq];
        let mut c2 = vec![0.0; nq];
        for i in 0..nr {
            for q in 0..nq {
                c0[q] = b.profiles[q][i];
                c1[q] = d1s[q][i];
                c2[q] = d2s[q][i];
            }
            AngularRule::synthesize(&rule.c, &c0, &mut out.f[i]);
            AngularRule::synthesize(&rule.c, &c1, &mut out.fr[i]);
            AngularRule::synthesize(&rule.c, &c2, &mut out.frr[i]);
            AngularRule::synthesize(&rule.dc, &c0, &mut out.ft[i]);
            AngularRule::synthesize(&rule.d2c, &c0, &mut out.ftt[i]);
            AngularRule::synthesize(&rule.dc, &c1, &mut out.frt[i]);
        }
        Ok(out)
    }

    /// `sup (1+r^2)^{rate/2} |f|` on `r <= delta/sqrt(eps)` and
    /// `sup eps^{-rate/2} |f|` beyond, sampled on grid nodes, angular nodes,
    /// the poles and a set of tangential directions.
    pub fn weighted_norm(&self, eps: f64, rate: f64, delta: f64) -> f64 {
        let ctx = &*self.ctx;
        let d = ctx.dims.dim - 1;
        let inner_r = if eps > 0.0 { delta / eps.sqrt() } else { f64::INFINITY };
        let mut ts: Vec<f64> = ctx.rules[0].t.clone();
        ts.push(0.0);
        ts.push(1.0);
        let dirs = directions(d, &self.blocks);
        // per block, per t: C_j(t) tables and sin^m
        let tables: Vec<Vec<Vec<f64>>> = self
            .blocks
            .iter()
            .map(|b| {
                let m = b.harmonic.degree();
                ts.iter()
                    .map(|&t| {
                        let c = gegenbauer(ctx.j_max, ctx.rules[m].alpha, t);
                        let s = (1.0 - t * t).max(0.0).sqrt().powi(m as i32);
                        (0..b.profiles.len()).map(|q| s * c[2 * q]).collect()
                    })
                    .collect()
            })
            .collect();
        let qvals: Vec<Vec<f64>> = self.blocks.iter().map(|b| dirs.iter().map(|e| b.harmonic.value(e)).collect()).collect();
        let mut best: f64 = 0.0;
        let mut radial = vec![0.0; self.blocks.len()];
        for i in 0..ctx.grid.len() {
            let r = ctx.grid.r[i];
            let w = if r <= inner_r { (1.0 + r * r).powf(rate / 2.0) } else { eps.powf(-rate / 2.0) };
            for (it, _) in ts.iter().enumerate() {
                for (bi, b) in self.blocks.iter().enumerate() {
                    radial[bi] = b.profiles.iter().enumerate().map(|(q, u)| u[i] * tables[bi][it][q]).sum();
                }
                for di in 0..dirs.len() {
                    let v: f64 = (0..self.blocks.len()).map(|bi| qvals[bi][di] * radial[bi]).sum();
                    best = best.max(w * v.abs());
                }
            }
        }
        best
    }

    /// Sampled estimate of the weighted Hölder seminorm of exponent `sigma`:
    /// the largest `weight(xi) |f(xi + h e) - f(xi)| / h^sigma` over a fixed
    /// set of base points, unit directions and dyadic steps `h <= 1/2`.
    pub fn holder_seminorm_estimate(&self, eps: f64, rate: f64, delta: f64, sigma: f64, samples: usize) -> f64 {
        let ctx = &*self.ctx;
        let n = ctx.dims.dim;
        let inner_r = if eps > 0.0 { delta / eps.sqrt() } else { f64::INFINITY };
        let r_top = ctx.grid.r_max().min(if eps > 0.0 { 3.0 * inner_r } else { ctx.grid.r_max() });
        let samples = samples.max(4);
        let mut best: f64 = 0.0;
        let mut unit = |k: usize| {
            let mut e = vec![0.0; n];
            e[k % n] = 1.0;
            e
        };
        let dirs: Vec<Vec<f64>> = (0..n).map(&mut unit).collect();
        for s in 0..samples {
            let frac = s as f64 / (samples - 1) as f64;
            let r = r_top * frac * frac;
            let w = if r <= inner_r { (1.0 + r * r).powf(rate / 2.0) } else { eps.powf(-rate / 2.0) };
            // base point on a fixed spiral of directions
            let th = 0.15 + 1.2 * frac;
            let mut xi = vec![0.0; n];
            xi[0] = r * th.sin();
            xi[n - 1] = r * th.cos();
            let f0 = self.eval(&xi);
            for e in &dirs {
                let mut h = 0.5;
                for _ in 0..5 {
                    let p: Vec<f64> = xi.iter().zip(e).map(|(a, b)| a + h * b).collect();
                    let diff = (self.eval(&p) - f0).abs();
                    best = best.max(w * diff / h.powf(sigma));
                    h *= 0.5;
                }
            }
        }
        best
    }
}

fn directions(d: usize, blocks: &[Block]) -> Vec<Vec<f64>> {
    let mut out = Vec::new();
    for i in 0..d {
        let mut e = vec![0.0; d];
        e[i] = 1.0;
        out.push(e);
    }
    if blocks.iter().all(|b| b.harmonic == Harmonic::Radial) {
        out.truncate(1);
        return out;
    }
    let s = core::f64::consts::FRAC_1_SQRT_2;
    for i in 0..d {
        for j in i + 1..d {
            for sign in [1.0, -1.0] {
                let mut e = vec![0.0; d];
                e[i] = s;
                e[j] = sign * s;
                out.push(e);
            }
        }
    }
    for b in blocks {
        if let Harmonic::Linear(c) = &b.harmonic {
            let n = dot(c, c).sqrt();
            if n > 0.0 {
                out.push(c.iter().map(|v| v / n).collect());
            }
        }
    }
    out
}

/// Origin values: the constant term is extrapolated from `r = h, 2h`; all
/// profiles of positive harmonic degree vanish there.
fn fill_origin(b: &mut Block) {
    let m = b.harmonic.degree();
    for (q, u) in b.profiles.iter_mut().enumerate() {
        u[0] = if m == 0 && q == 0 { (4.0 * u[1] - u[2]) / 3.0 } else { 0.0 };
    }
}
