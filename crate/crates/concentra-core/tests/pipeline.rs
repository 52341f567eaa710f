use concentra_core::{
    bubble_constants, builtin_geometry, mu0_field, reduced_eigenvalues, reduced_forms, verify_identities, BuiltinGeometry,
    DimensionParams, Eigenpair, Error, JacobiOperator, QuadOptions,
};

// scipy half-space quadrature and shooting, N = 7
const B: f64 = 7353.57233168287;
const A1: f64 = 1950.59564328521;
const LAMBDA0: f64 = 7.786934367451;

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs()
}

#[test]
fn constants_feed_the_concentration_scale() {
    let dims = DimensionParams::new(7).unwrap();
    assert!(verify_identities(dims, 1e-6).unwrap().all_pass());
    let eig = Eigenpair::compute(dims).unwrap();
    assert!(rel(eig.lambda0, LAMBDA0) < 1e-6);
    let ct = bubble_constants(dims, &eig, &QuadOptions::with_rel_tol(1e-10)).unwrap();
    assert!(rel(ct.b, B) < 1e-9 && rel(ct.a1_frak, A1) < 1e-9);
    let cd = builtin_geometry(&BuiltinGeometry::RoundSphere, 8, 32).unwrap();
    let mu = mu0_field(&cd, &ct).unwrap();
    assert!(mu.iter().all(|m| rel(*m, A1 * 8.0 / B) < 1e-9));
    let flat = builtin_geometry(&BuiltinGeometry::Flat, 8, 32).unwrap();
    assert!(matches!(mu0_field(&flat, &ct), Err(Error::Positivity { .. })));
}

#[test]
fn reduced_spectrum_vanishes_at_closed_form_crossings() {
    let dims = DimensionParams::new(7).unwrap();
    let eig = Eigenpair::compute(dims).unwrap();
    let ct = bubble_constants(dims, &eig, &QuadOptions::with_rel_tol(1e-10)).unwrap();
    let cd = builtin_geometry(&BuiltinGeometry::RoundSphere, 8, 64).unwrap();
    let forms = reduced_forms(&cd, &ct, 0.05).unwrap();
    for m in 2..6 {
        let eps = eig.lambda0.sqrt() / m as f64;
        let lam = reduced_eigenvalues(&forms, eps, 64).unwrap();
        let closest = lam.iter().fold(f64::INFINITY, |a, v| a.min(v.abs()));
        assert!(closest < 1e-8 * eig.lambda0, "m = {m}: {closest}");
        // every mode below m is still negative
        assert_eq!(lam.iter().filter(|v| **v < -1e-8).count(), 2 * m - 1, "m = {m}");
    }
}

#[test]
fn jacobi_degeneracy_is_lifted_by_perturbation() {
    let round = builtin_geometry(&BuiltinGeometry::RoundSphere, 8, 64).unwrap();
    let j = JacobiOperator::new(&round).unwrap();
    match j.solve(&j.zero_section()) {
        Err(Error::Degenerate { kernel, .. }) => assert_eq!(kernel.len(), 12),
        other => panic!("{other:?}"),
    }
    let bumped = builtin_geometry(&BuiltinGeometry::PerturbedSphere { amplitude: 0.1 }, 8, 64).unwrap();
    let j = JacobiOperator::new(&bumped).unwrap();
    let g: Vec<f64> = (0..j.zero_section().len()).map(|k| (0.37 * k as f64).cos()).collect();
    let phi = j.solve(&g).unwrap();
    let res = j.apply(&phi).iter().zip(&g).fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
    assert!(res <= 1e-8, "{res}");
}
