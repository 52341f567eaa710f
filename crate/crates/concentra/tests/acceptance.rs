//! End-to-end acceptance run: one line per criterion, nonzero exit on any failure.

use concentra::commands::{self, Session};
use concentra::config::RunConfig;
use concentra_core::expansion::{curvature_cancellation, g1_projections};
use concentra_core::modes::Harmonic;
use concentra_core::{
    bubble_constants, builtin_geometry, mu0_field, reduced_forms, solve_linearized, verify_identities, BuiltinGeometry,
    DimensionParams, Eigenpair, Error, JacobiOperator, ModeContext, ModeFunction, QuadOptions, SolveOptions,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::sync::Arc;
use std::time::Instant;

type Verdict = Result<String, String>;

fn fixture() -> (DimensionParams, Eigenpair, concentra_core::ConstantsTable) {
    let dims = DimensionParams::new(7).unwrap();
    let eig = Eigenpair::compute(dims).unwrap();
    let ct = bubble_constants(dims, &eig, &QuadOptions::with_rel_tol(1e-10)).unwrap();
    (dims, eig, ct)
}

fn identities() -> Verdict {
    let start = Instant::now();
    let mut worst = 0.0f64;
    for n in [7, 8] {
        let rep = verify_identities(DimensionParams::new(n).map_err(|e| e.to_string())?, 1e-6).map_err(|e| e.to_string())?;
        worst = rep.checks.iter().fold(worst, |m, c| m.max(c.residual));
        if let Some(c) = rep.checks.iter().find(|c| !c.pass) {
            return Err(format!("N = {n}: {} residual {:e}", c.name, c.residual));
        }
    }
    let secs = start.elapsed().as_secs_f64();
    if secs >= 30.0 {
        return Err(format!("took {secs:.1} s"));
    }
    Ok(format!("N in {{7, 8}}, worst residual {worst:.2e}, {secs:.2} s"))
}

fn eigenpair(eig: &Eigenpair) -> Verdict {
    let msg = format!("lambda0 = {:.9}, drift {:.2e}, residual {:.2e}", eig.lambda0, eig.drift, eig.residual);
    if eig.lambda0 > 0.0 && eig.drift <= 1e-6 && eig.residual <= 1e-6 {
        Ok(msg)
    } else {
        Err(msg)
    }
}

fn random_curvature(rng: &mut ChaCha8Rng, d: usize) -> Vec<f64> {
    // R = sum_ab c_ab omega_a (x) omega_b with omega_a antisymmetric and c symmetric
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

fn projections(ctx: &ModeContext, ct: &concentra_core::ConstantsTable) -> Verdict {
    let cd = builtin_geometry(&BuiltinGeometry::PerturbedSphere { amplitude: 0.1 }, 8, 16).map_err(|e| e.to_string())?;
    let mu = mu0_field(&cd, ct).map_err(|e| e.to_string())?;
    let opts = QuadOptions::with_rel_tol(1e-12);
    let (mut z0, mut zl) = (0.0f64, 0.0f64);
    for (j, m) in mu.iter().enumerate() {
        let p = g1_projections(&ctx.bubble, &cd, *m, j, &opts).map_err(|e| e.to_string())?;
        z0 = z0.max(p.z0.abs());
        zl = p.zl.iter().fold(zl, |a, v| a.max(v.abs()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut cancel = 0.0f64;
    for _ in 0..50 {
        let r = random_curvature(&mut rng, 6);
        let phi: Vec<f64> = (0..6).map(|_| rng.random_range(-1.0..1.0)).collect();
        cancel = cancel.max(curvature_cancellation(&ctx.bubble, &r, &phi, &opts).map_err(|e| e.to_string())?);
    }
    let msg = format!("Z_0 {z0:.2e}, Z_l {zl:.2e}, curvature cancellation {cancel:.2e} over 50 tensors");
    if z0 <= 1e-6 && zl <= 1e-10 && cancel <= 1e-8 {
        Ok(msg)
    } else {
        Err(msg)
    }
}

fn run_checks(name: &str, out: Result<concentra::report::Outcome, concentra::error::CliError>) -> Verdict {
    let o = out.map_err(|e| e.to_string())?;
    let failed: Vec<String> = o.checks.iter().filter(|c| !c.pass).map(|c| format!("{} = {:e}", c.name, c.value)).collect();
    let summary = format!("{name}: {} checks", o.checks.len());
    if failed.is_empty() {
        Ok(summary)
    } else {
        Err(format!("{summary}, failed: {}", failed.join("; ")))
    }
}

fn expansion(session: &mut Session) -> Verdict {
    let o = commands::expand(session).map_err(|e| e.to_string())?;
    let fits: Vec<String> = o.payload["layers"]
        .as_array()
        .unwrap()
        .iter()
        .map(|l| format!("w{} {:.3}", l["layer"], l["fitted_exponent"].as_f64().unwrap_or(f64::NAN)))
        .collect();
    let res = o.payload["residual"]["fitted_exponent"].as_f64().unwrap_or(f64::NAN);
    let detail = format!("{}, residual {res:.3}", fits.join(", "));
    run_checks("expand", Ok(o)).map(|s| format!("{s}, {detail}")).map_err(|s| format!("{s}, {detail}"))
}

fn kernel_free_rhs(ctx: &Arc<ModeContext>, rng: &mut ChaCha8Rng) -> ModeFunction {
    let c: Vec<f64> = (0..4).map(|_| rng.random_range(-1.0..1.0)).collect();
    let mut g = ModeFunction::from_fn(ctx, Harmonic::Radial, 30.0, move |r, t| {
        let s = 1.0 + r * r;
        (c[0] + c[1] * t * t) * s.powi(-3) + (c[2] + c[3] * t * t * t * t) * r * r * s.powi(-4)
    })
    .unwrap();
    let e: Vec<f64> = (0..6).map(|_| rng.random_range(-1.0..1.0)).collect();
    let a = rng.random_range(-1.0..1.0);
    g.add_scaled(&ModeFunction::from_fn(ctx, Harmonic::Linear(e), 30.0, move |r, t| (1.0 + a * t * t) * r * (1.0 + r * r).powi(-3)).unwrap(), 1.0);
    g.remove_kernel();
    g
}

fn solver_band(ctx: &Arc<ModeContext>, a: f64) -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let ensemble: Vec<ModeFunction> = (0..8).map(|_| kernel_free_rhs(ctx, &mut rng)).collect();
    let opts = SolveOptions::default();
    let eps_grid: Vec<f64> = (0..7).map(|i| 3e-3 * (1e-1f64 / 3e-3).powf(i as f64 / 6.0)).collect();
    let mut per_eps = Vec::new();
    for &eps in &eps_grid {
        let mut worst = 0.0f64;
        for g in &ensemble {
            let (_, d) = solve_linearized(g, eps, a, &opts).map_err(|e| format!("eps = {eps:.2e}: {e}"))?;
            worst = worst.max(d.ratio);
        }
        per_eps.push(worst);
    }
    let hi = per_eps.iter().copied().fold(0.0f64, f64::max);
    let lo = per_eps.iter().copied().fold(f64::INFINITY, f64::min);
    let band = hi / lo;
    let msg = format!("ensemble ratio in [{lo:.3}, {hi:.3}] over eps in [3e-3, 1e-1], band {band:.3} (bound 3)");
    if band <= 3.0 {
        Ok(msg)
    } else {
        Err(msg)
    }
}

fn jacobi() -> Verdict {
    let cd = builtin_geometry(&BuiltinGeometry::RoundSphere, 8, 128).map_err(|e| e.to_string())?;
    let j = JacobiOperator::new(&cd).map_err(|e| e.to_string())?;
    let vectors = match j.solve(&j.zero_section()) {
        Err(Error::Degenerate { kernel, .. }) => kernel,
        other => return Err(format!("round sphere not reported degenerate: {other:?}")),
    };
    let kernel = vectors.len();
    if kernel != 12 {
        return Err(format!("kernel dimension {kernel}, expected 12"));
    }
    // every kernel component lies in span{cos y, sin y}
    let m = cd.samples();
    let mut off_span = 0.0f64;
    for part in vectors.iter().flat_map(|v| v.chunks(m)) {
        let (mut a, mut b) = (0.0, 0.0);
        for (k, y) in cd.grid.y.iter().enumerate() {
            a += part[k] * y.cos() * 2.0 / m as f64;
            b += part[k] * y.sin() * 2.0 / m as f64;
        }
        for (k, y) in cd.grid.y.iter().enumerate() {
            off_span = off_span.max((part[k] - a * y.cos() - b * y.sin()).abs());
        }
    }
    if off_span > 1e-10 {
        return Err(format!("kernel leaves the first Fourier modes by {off_span:e}"));
    }
    let cd = builtin_geometry(&BuiltinGeometry::PerturbedSphere { amplitude: 0.1 }, 8, 128).map_err(|e| e.to_string())?;
    let j = JacobiOperator::new(&cd).map_err(|e| e.to_string())?;
    let mut g = j.zero_section();
    for (k, v) in g.iter_mut().enumerate() {
        let y = cd.grid.y[k % cd.samples()];
        *v = (y + k as f64).sin() + 0.3 * (2.0 * y).cos();
    }
    let phi = j.solve(&g).map_err(|e| e.to_string())?;
    let res = j.apply(&phi).iter().zip(&g).fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
    let msg = format!("round sphere kernel dimension {kernel} in the first Fourier modes, perturbed sphere residual {res:.2e}");
    if res <= 1e-8 {
        Ok(msg)
    } else {
        Err(msg)
    }
}

fn gaps(ct: &concentra_core::ConstantsTable) -> Verdict {
    let start = Instant::now();
    let cfg = RunConfig::default();
    let levels = cfg.spectrum.levels.all();
    let cd = builtin_geometry(&cfg.geometry.builtin(), 8, cfg.spectrum.grid).map_err(|e| e.to_string())?;
    let forms = reduced_forms(&cd, ct, 0.5f64.powf(levels[0] as f64 / 2.0)).map_err(|e| e.to_string())?;
    let s = commands::gap_summary(&forms, &levels, cfg.spectrum.j, cfg.spectrum.c_target).map_err(|e| e.to_string())?;
    let secs = start.elapsed().as_secs_f64();
    let c_min = s.gaps.iter().map(|g| g.c_observed).fold(f64::INFINITY, f64::min);
    let failed: Vec<String> = s.checks.iter().filter(|c| !c.pass).map(|c| format!("{} = {:e}", c.name, c.value)).collect();
    let msg = format!("levels {}..{}, {} checks, c_min {c_min:.3}, {secs:.1} s", levels[0], levels[levels.len() - 1], s.checks.len());
    if !failed.is_empty() {
        return Err(format!("{msg}, failed: {}", failed.join("; ")));
    }
    if secs >= 120.0 {
        return Err(format!("{msg}: over two minutes"));
    }
    Ok(msg)
}

fn positivity(ct: &concentra_core::ConstantsTable) -> Verdict {
    let cd = builtin_geometry(&BuiltinGeometry::RoundSphere, 8, 64).map_err(|e| e.to_string())?;
    let dev = cd.hbar_field().iter().fold(0.0f64, |m, h| m.max((h - 8.0).abs()));
    if dev > 1e-12 {
        return Err(format!("round sphere Hbar deviates from N + 1 by {dev:e}"));
    }
    let flat = builtin_geometry(&BuiltinGeometry::Flat, 8, 64).map_err(|e| e.to_string())?;
    match mu0_field(&flat, ct) {
        Err(Error::Positivity { y, value }) => Ok(format!("Hbar = N + 1 within {dev:.1e}; flat rejected at y = {y} (Hbar = {value})")),
        other => Err(format!("flat geometry not rejected: {other:?}")),
    }
}

fn main() {
    let (dims, eig, ct) = fixture();
    let ctx = Arc::new(ModeContext::with_defaults(dims, &eig));
    let mut session = Session::new(&RunConfig::default()).unwrap();
    let a = {
        let cd = builtin_geometry(&BuiltinGeometry::RoundSphere, 8, 8).unwrap();
        let mu = mu0_field(&cd, &ct).unwrap()[0];
        mu * mu
    };
    let criteria: Vec<(&str, Box<dyn FnOnce() -> Verdict + '_>)> = vec![
        ("bubble integral identities", Box::new(identities)),
        ("linearized eigenpair", Box::new(|| eigenpair(&eig))),
        ("first-order kernel projections", Box::new(|| projections(&ctx, &ct))),
        ("layered expansion rates", Box::new(|| expansion(&mut session))),
        ("uniform linear solve", Box::new(|| solver_band(&ctx, a))),
        ("Jacobi degeneracy and invertibility", Box::new(jacobi)),
        ("dyadic resonance gaps", Box::new(|| gaps(&ct))),
        ("curvature positivity", Box::new(|| positivity(&ct))),
    ];
    let mut failures = 0;
    for (i, (name, f)) in criteria.into_iter().enumerate() {
        match f() {
            Ok(msg) => println!("criterion {}: PASS {name}: {msg}", i + 1),
            Err(msg) => {
                failures += 1;
                println!("criterion {}: FAIL {name}: {msg}", i + 1);
            }
        }
    }
    println!("acceptance: {} of 8 passed", 8 - failures);
    if failures > 0 {
        std::process::exit(1);
    }
}
