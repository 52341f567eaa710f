//! One function per subcommand; each returns its payload, checks and table.

use crate::config::RunConfig;
use crate::error::CliError;
use crate::report::{num, Check, Outcome, Table};
use concentra_core::expansion::fit_exponent;
use concentra_core::spectrum::{rayleigh_ritz, sandwich_fit, spectrum_report, GapResult};
use concentra_core::{
    bubble_constants, build_expansion, builtin_geometry, find_gap_epsilon, mu0_field, reduced_eigenvalues, reduced_forms, residual,
    verify_identities, weyl_count, ConstantsTable, CurvatureData, DimensionParams, Eigenpair, ExpansionOptions, ModeContext,
    QuadOptions, ReducedForms, SolveOptions,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};
use std::sync::Arc;

pub const IDENTITY_TOL: f64 = 1e-6;
pub const CONSTANTS_TOL: f64 = 1e-10;

/// Bubble data shared by the subcommands of one run.
pub struct Session {
    pub cfg: RunConfig,
    pub dims: DimensionParams,
    eig: Option<Eigenpair>,
    ct: Option<ConstantsTable>,
}

impl Session {
    pub fn new(cfg: &RunConfig) -> Result<Self, CliError> {
        Ok(Self { cfg: cfg.clone(), dims: DimensionParams::new(cfg.dims.n)?, eig: None, ct: None })
    }

    pub fn eigenpair(&mut self) -> Result<&Eigenpair, CliError> {
        if self.eig.is_none() {
            self.eig = Some(Eigenpair::compute(self.dims)?);
        }
        Ok(self.eig.as_ref().unwrap())
    }

    pub fn constants(&mut self) -> Result<&ConstantsTable, CliError> {
        if self.ct.is_none() {
            let dims = self.dims;
            let ct = bubble_constants(dims, self.eigenpair()?, &QuadOptions::with_rel_tol(CONSTANTS_TOL))?;
            self.ct = Some(ct);
        }
        Ok(self.ct.as_ref().unwrap())
    }

    fn geometry(&self, grid: usize) -> Result<CurvatureData, CliError> {
        Ok(builtin_geometry(&self.cfg.geometry.builtin(), self.dims.dim + 1, grid)?)
    }
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs()
}

pub fn constants(s: &mut Session) -> Result<Outcome, CliError> {
    let (drift, eres, lambda_levels) = {
        let e = s.eigenpair()?;
        (e.drift, e.residual, e.lambda_levels)
    };
    let ct = s.constants()?.clone();
    let entries = [
        ("A0_frak", ct.a0_frak),
        ("A1_frak", ct.a1_frak),
        ("B", ct.b),
        ("C0", ct.c0),
        ("A", ct.a),
        ("C", ct.c),
        ("D", ct.d),
        ("D_full", ct.d_full),
        ("lambda0", ct.lambda0),
        ("lambda0_bar", ct.lambda0_bar),
    ];
    let mut table = Table::new(&["name", "value"]);
    for (k, v) in entries {
        table.push(vec![k.into(), num(v)]);
    }
    let refinement = format!("quadrature rel_tol {:e}, eigen h {}", ct.rel_tol, 0.0025);
    let checks = vec![
        Check::flag("all constants finite and positive", entries.iter().all(|(_, v)| v.is_finite() && *v > 0.0), &refinement),
        Check::at_most("A0_frak = 2 A1_frak (relative)", rel(ct.a0_frak, 2.0 * ct.a1_frak), IDENTITY_TOL, &refinement),
        Check::at_most("D = 1/2 (relative)", rel(ct.d, 0.5), IDENTITY_TOL, &refinement),
        Check::at_most("constants change under 100x tighter quadrature", ct.refinement_change, IDENTITY_TOL, &refinement),
        Check::at_most("lambda0 drift under grid halving", drift, IDENTITY_TOL, "h, h/3, h/9 Richardson"),
        Check::at_most("eigen residual sup", eres, IDENTITY_TOL, "independent fourth-order stencil"),
    ];
    let payload = json!({
        "N": s.dims.dim,
        "constants": entries.iter().map(|(k, v)| (k.to_string(), json!(v))).collect::<serde_json::Map<_, _>>(),
        "eigen": { "lambda0": ct.lambda0, "lambda_levels": lambda_levels, "drift": drift, "residual": eres },
        "tolerance": ct.rel_tol,
        "refinement": refinement,
    });
    Ok(Outcome { payload, checks, table: Some(table) })
}

pub fn identities(s: &mut Session) -> Result<Outcome, CliError> {
    let rep = verify_identities(s.dims, IDENTITY_TOL)?;
    let mut table = Table::new(&["identity", "lhs", "rhs", "relative_residual", "pass"]);
    let mut checks = Vec::new();
    for c in &rep.checks {
        table.push(vec![c.name.clone(), num(c.lhs), num(c.rhs), num(c.residual), c.pass.to_string()]);
        checks.push(Check::at_most(&c.name, c.residual, rep.tol, "adaptive Gauss-Kronrod"));
    }
    let payload = json!({
        "N": rep.dim,
        "tolerance": rep.tol,
        "identities": rep.checks.iter().map(|c| json!({"name": c.name, "lhs": c.lhs, "rhs": c.rhs, "residual": c.residual, "pass": c.pass})).collect::<Vec<_>>(),
    });
    Ok(Outcome { payload, checks, table: Some(table) })
}

pub fn mu0(s: &mut Session) -> Result<Outcome, CliError> {
    let cd = s.geometry(s.cfg.geometry.grid)?;
    let hbar = cd.hbar_field();
    let ct = s.constants()?.clone();
    let mu = mu0_field(&cd, &ct)?;
    let mut table = Table::new(&["y", "hbar", "mu0"]);
    for j in 0..cd.samples() {
        table.push(vec![num(cd.grid.y[j]), num(hbar[j]), num(mu[j])]);
    }
    let refinement = format!("{} samples along the curve", cd.samples());
    let mut checks = vec![Check::at_least("min Hbar", hbar.iter().copied().fold(f64::INFINITY, f64::min), f64::MIN_POSITIVE, &refinement)];
    let n1 = (s.dims.dim + 1) as f64;
    if cd.label == "round_sphere" {
        let dev = hbar.iter().fold(0.0f64, |m, h| m.max((h - n1).abs()));
        checks.push(Check::at_most("Hbar = N + 1 on the round sphere", dev, 1e-12, &refinement));
    }
    let from_mean = (0..cd.samples()).fold(0.0f64, |m, j| m.max((cd.hbar_from_mean_curvature(j) - hbar[j]).abs()));
    checks.push(Check::at_most("Hbar from trace form = Hbar from mean curvature", from_mean, 1e-12, &refinement));
    let payload = json!({
        "geometry": cd.label,
        "hbar": { "min": hbar.iter().copied().fold(f64::INFINITY, f64::min), "max": hbar.iter().copied().fold(f64::NEG_INFINITY, f64::max) },
        "mu0": { "min": mu.iter().copied().fold(f64::INFINITY, f64::min), "max": mu.iter().copied().fold(f64::NEG_INFINITY, f64::max) },
        "minimality_residual": cd.minimality_residual(),
        "tolerance": 1e-12,
        "refinement": refinement,
    });
    Ok(Outcome { payload, checks, table: Some(table) })
}

pub fn expand(s: &mut Session) -> Result<Outcome, CliError> {
    let cfg = s.cfg.clone();
    let cd = s.geometry(cfg.expansion.samples)?;
    let ctx = Arc::new(ModeContext::with_defaults(s.dims, s.eigenpair()?));
    let ct = s.constants()?.clone();
    let mu0 = mu0_field(&cd, &ct)?;
    let opts = ExpansionOptions {
        order: cfg.expansion.order,
        solve: SolveOptions { orth_tol: cfg.solver.orth_tol, rate: cfg.solver.rate, delta: cfg.solver.delta },
        delta: cfg.solver.delta,
        ..Default::default()
    };
    let eps = &cfg.expansion.eps_list;
    let mut layer_norms: Vec<Vec<f64>> = vec![Vec::new(); cfg.expansion.order + 1];
    let mut per_eps = Vec::new();
    let mut res_norms = Vec::new();
    let mut mu_dev = Vec::new();
    let mut z0_after = 0.0f64;
    for &e in eps {
        let st = build_expansion(&ctx, &cd, &ct, e, &opts)?;
        let r = residual(&st)?;
        for (k, w) in st.norms.w.iter().enumerate() {
            layer_norms[k].push(*w);
        }
        let dev = st.mu_total().iter().zip(&mu0).fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
        z0_after = st.norms.z0_after_mu.iter().fold(z0_after, |m, v| m.max(*v));
        per_eps.push(json!({
            "eps": e,
            "w_norms": st.norms.w,
            "mu_norms": st.norms.mu,
            "phi_norms": st.norms.phi,
            "z0_after_mu": st.norms.z0_after_mu,
            "zl_before_phi": st.norms.zl_before_phi,
            "mu_minus_mu0_sup": dev,
            "residual": { "norm": r.norm, "per_y": r.per_y, "truncation": r.truncation },
        }));
        res_norms.push(r.norm);
        mu_dev.push(dev);
    }
    let sweep = eps.len() >= 2;
    let fits: Vec<Option<f64>> = layer_norms.iter().map(|v| sweep.then(|| fit_exponent(eps, v))).collect();
    let res_fit = sweep.then(|| fit_exponent(eps, &res_norms));
    let mut table = Table::new(&["layer", "eps", "norm", "fitted_exponent"]);
    for (k, v) in layer_norms.iter().enumerate() {
        for (e, n) in eps.iter().zip(v) {
            table.push(vec![(k + 1).to_string(), num(*e), num(*n), fits[k].map(num).unwrap_or_default()]);
        }
    }
    let refinement = format!("{} samples along the curve, {} radial nodes", cd.samples(), ctx.grid.len());
    let mut checks = vec![Check::at_most("max_y |int E Z_0| after each mu step", z0_after, 1e-8, &refinement)];
    if eps.len() >= 3 {
        for (k, f) in fits.iter().enumerate() {
            let want = 1.0 + k as f64 / 2.0;
            checks.push(Check::at_most(format!("|fit(||w_{}||) - {want}|", k + 1), (f.unwrap() - want).abs(), 0.3, &refinement));
        }
        if cfg.expansion.order >= 1 {
            let want = 1.0 + (cfg.expansion.order as f64 + 1.0) / 2.0 - 0.3;
            checks.push(Check::at_least("residual slope", res_fit.unwrap(), want, &refinement));
        }
        if cfg.expansion.order >= 1 {
            checks.push(Check::flag("sup |mu - mu0| decreases along the sweep", mu_dev.windows(2).all(|w| w[1] < w[0]), &refinement));
        }
    }
    let payload = json!({
        "geometry": cd.label,
        "order": cfg.expansion.order,
        "eps": eps,
        "layers": layer_norms.iter().enumerate().map(|(k, v)| json!({"layer": k + 1, "norms": v, "fitted_exponent": fits[k]})).collect::<Vec<_>>(),
        "residual": { "norms": res_norms, "fitted_exponent": res_fit },
        "mu_minus_mu0_sup": mu_dev,
        "per_eps": per_eps,
        "tolerance": 0.3,
        "refinement": refinement,
    });
    Ok(Outcome { payload, checks, table: Some(table) })
}

fn spectrum_forms(s: &mut Session) -> Result<ReducedForms, CliError> {
    let cd = s.geometry(s.cfg.spectrum.grid)?;
    let ct = s.constants()?.clone();
    let eps = 0.5f64.powf(s.cfg.spectrum.levels.lo as f64 / 2.0);
    Ok(reduced_forms(&cd, &ct, eps)?)
}

pub fn spectrum(s: &mut Session) -> Result<Outcome, CliError> {
    let cfg = s.cfg.spectrum.clone();
    let forms = spectrum_forms(s)?;
    let levels = cfg.levels.all();
    let rep = spectrum_report(&forms, &levels, cfg.j, cfg.c_target, cfg.samples_per_level)?;
    let mut table = Table::new(&["sigma", "j", "lambda"]);
    for (i, sig) in rep.sigma_grid.iter().enumerate() {
        for (j, c) in rep.lambda_curves.iter().enumerate() {
            table.push(vec![num(*sig), (j + 1).to_string(), num(c[i])]);
        }
    }
    let refinement = format!("{} samples along the curve, {} eigenvalues", forms.samples(), cfg.j);
    // monotone in sigma: the constant mode is flat, every other one strictly increasing
    let monotone = rep.lambda_curves.iter().skip(1).all(|c| c.windows(2).all(|w| w[1] > w[0]));
    // Courant-Fischer: Ritz values bound the exact ones from above
    let eps = forms.eps;
    let exact = reduced_eigenvalues(&forms, eps, 40)?;
    let mut rng = ChaCha8Rng::seed_from_u64(s.cfg.seed);
    let generic: Vec<Vec<f64>> = (0..40).map(|_| (0..forms.samples()).map(|_| rng.random_range(-1.0..1.0)).collect()).collect();
    let ritz = rayleigh_ritz(&forms, eps, &generic)?;
    let scale = exact.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let violation = ritz.iter().zip(&exact).fold(0.0f64, |m, (t, l)| m.max(l - t)) / scale;
    let mut fourier = vec![vec![1.0; forms.samples()]];
    let w = 2.0 * std::f64::consts::PI / forms.grid.length;
    for m in 1..=20 {
        fourier.push(forms.grid.y.iter().map(|y| (w * m as f64 * y).cos()).collect());
        if m < 20 {
            fourier.push(forms.grid.y.iter().map(|y| (w * m as f64 * y).sin()).collect());
        }
    }
    let ritz_f = rayleigh_ritz(&forms, eps, &fourier)?;
    let agree = ritz_f.iter().zip(&exact).fold(0.0f64, |m, (t, l)| m.max((t - l).abs()));
    let checks = vec![
        Check::flag("two-sided slope bound holds for fitted gamma", rep.sandwich.holds, "16 points per level"),
        Check::flag("lambda_j increasing in sigma", monotone, &refinement),
        Check::at_most("Ritz values below exact eigenvalues (relative violation)", violation.max(0.0), 1e-10, "40-dimensional random subspace"),
        Check::at_most("Ritz values on the Fourier subspace", agree, 1e-8, "40 lowest Fourier modes"),
    ];
    let payload = json!({
        "levels": levels,
        "eigenvalue_count": cfg.j,
        "curve_points": rep.sigma_grid.len(),
        "resonance_count": rep.resonances.len(),
        "sandwich": { "gamma_minus": rep.sandwich.gamma_minus, "gamma_plus": rep.sandwich.gamma_plus, "worst_slack": rep.sandwich.worst_slack, "holds": rep.sandwich.holds },
        "courant_fischer": { "max_violation": violation, "fourier_agreement": agree },
        "selected": rep.selected.iter().map(gap_json).collect::<Vec<_>>(),
        "truncation": rep.truncation,
        "tolerance": 1e-8,
        "refinement": refinement,
    });
    Ok(Outcome { payload, checks, table: Some(table) })
}

fn gap_json(g: &GapResult) -> Value {
    json!({
        "l": g.level,
        "sigma_l": g.sigma,
        "eps_l": g.eps,
        "gap": g.gap,
        "c_observed": g.c_observed,
        "meets_target": g.meets_target,
        "interval": [g.interval.0, g.interval.1],
        "window": [g.window.0, g.window.1],
        "negative_count": g.negative_count,
        "crossings": g.crossings,
    })
}

/// The four parts of the resonance-gap criterion over a list of levels.
pub struct GapSummary {
    pub gaps: Vec<GapResult>,
    pub count_ratio: Vec<f64>,
    pub width_ratio: Vec<f64>,
    pub weyl_bound: Vec<usize>,
    pub checks: Vec<Check>,
}

fn spread(v: &[f64]) -> f64 {
    v.iter().copied().fold(f64::NEG_INFINITY, f64::max) / v.iter().copied().fold(f64::INFINITY, f64::min)
}

pub fn gap_summary(forms: &ReducedForms, levels: &[u32], count: usize, c_target: f64) -> Result<GapSummary, CliError> {
    let gaps: Vec<GapResult> = levels.iter().map(|&l| find_gap_epsilon(forms, l, count, c_target)).collect::<Result<_, _>>()?;
    let count_ratio: Vec<f64> = gaps.iter().map(|g| g.crossings.len() as f64 / 2f64.powf(g.level as f64 / 2.0)).collect();
    let width_ratio: Vec<f64> = gaps.iter().map(|g| (g.interval.1 - g.interval.0) / 2f64.powf(-1.5 * g.level as f64)).collect();
    let weyl_bound: Vec<usize> =
        gaps.iter().map(|g| weyl_count(g.window.0, forms.lambda0, forms.arc_length())).collect::<Result<_, _>>()?;
    let card_ok = gaps.iter().zip(&weyl_bound).all(|(g, w)| g.crossings.len() <= g.negative_count && g.negative_count <= *w);
    let c_min = gaps.iter().map(|g| g.c_observed).fold(f64::INFINITY, f64::min);
    let sandwich = sandwich_fit(forms, levels, count.min(200), 16)?;
    let refinement = format!("{} sigma points per level, {count} eigenvalues", concentra_core::spectrum::LEVEL_GRID);
    let checks = vec![
        Check::at_most("(a) spread of card(crossings) / 2^(l/2) across levels", spread(&count_ratio), 2.0, &refinement),
        Check::flag("(a) card(crossings) <= N(2^-(l+1)) <= Weyl bound", card_ok, &refinement),
        Check::at_most("(b) spread of widest gap / 2^(-3l/2) across levels", spread(&width_ratio), 2.0, &refinement),
        Check::at_least("(b) single C = min widest gap / 2^(-3l/2)", width_ratio.iter().copied().fold(f64::INFINITY, f64::min), f64::MIN_POSITIVE, &refinement),
        Check::at_least("(c) min_l min_j |lambda_j(eps_l)| / eps_l", c_min, c_target, &refinement),
        Check::flag("(d) two-sided slope bound holds for fitted gamma", sandwich.holds, "16 points per level"),
    ];
    Ok(GapSummary { gaps, count_ratio, width_ratio, weyl_bound, checks })
}

pub fn gaps(s: &mut Session) -> Result<Outcome, CliError> {
    let cfg = s.cfg.spectrum.clone();
    let forms = spectrum_forms(s)?;
    let sum = gap_summary(&forms, &cfg.levels.all(), cfg.j, cfg.c_target)?;
    let mut table = Table::new(&["l", "sigma_l", "eps_l", "gap", "c_observed", "crossings"]);
    for g in &sum.gaps {
        table.push(vec![g.level.to_string(), num(g.sigma), num(g.eps), num(g.gap), num(g.c_observed), g.crossings.len().to_string()]);
    }
    let payload = json!({
        "levels": sum.gaps.iter().map(gap_json).collect::<Vec<_>>(),
        "count_ratio": sum.count_ratio,
        "width_ratio": sum.width_ratio,
        "weyl_bound": sum.weyl_bound,
        "c_target": cfg.c_target,
        "tolerance": 2.0,
        "refinement": format!("{} sigma points per level", concentra_core::spectrum::LEVEL_GRID),
    });
    Ok(Outcome { payload, checks: sum.checks, table: Some(table) })
}
