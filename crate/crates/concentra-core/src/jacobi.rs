//! The Jacobi operator `-Phi'' / g + R Phi` of the curve, acting on periodic
//! normal sections stored component-major (`phi[m * samples + j]`).

use num_traits::Float;
use crate::error::{Error, Result};
use crate::geometry::CurvatureData;
use crate::periodic::PeriodicGrid;
use alloc::vec;
use alloc::vec::Vec;
use nalgebra::{DMatrix, DVector, SymmetricEigen};

#[derive(Debug, Clone)]
pub struct JacobiOperator {
    pub components: usize,
    pub samples: usize,
    /// `R_ml(y_j)` at `[j][m * components + l]`.
    pub potential: Vec<Vec<f64>>,
    matrix: DMatrix<f64>,
    eigenvalues: DVector<f64>,
    eigenvectors: DMatrix<f64>,
}

/// Relative size of the smallest eigenvalue below which the operator counts as degenerate.
pub const DEGENERACY_THRESHOLD: f64 = 1e-8;

impl JacobiOperator {
    pub fn new(cd: &CurvatureData) -> Result<Self> {
        let d = cd.dim() - 1;
        let m = cd.samples();
        let potential: Vec<Vec<f64>> = (0..m).map(|j| cd.jacobi_potential(j)).collect();
        let d2 = cd.grid.d2();
        let size = d * m;
        let mut matrix = DMatrix::zeros(size, size);
        for c in 0..d {
            for j in 0..m {
                let gi = 1.0 / cd.g_tilde[j];
                for k in 0..m {
                    matrix[(c * m + j, c * m + k)] = -gi * d2[j * m + k];
                }
            }
        }
        for (j, p) in potential.iter().enumerate() {
            for a in 0..d {
                for b in 0..d {
                    matrix[(a * m + j, b * m + j)] += p[a * d + b];
                }
            }
        }
        // the discrete operator is symmetric for constant g; symmetrize the rounding
        let sym = (&matrix + matrix.transpose()) * 0.5;
        let eig = SymmetricEigen::new(sym);
        if eig.eigenvalues.iter().any(|v| !v.is_finite()) {
            return Err(Error::Numerical("Jacobi eigendecomposition did not converge".into()));
        }
        Ok(Self { components: d, samples: m, potential, matrix, eigenvalues: eig.eigenvalues, eigenvectors: eig.eigenvectors })
    }

    pub fn apply(&self, phi: &[f64]) -> Vec<f64> {
        let v = DVector::from_column_slice(phi);
        (&self.matrix * v).as_slice().to_vec()
    }

    /// Eigenvalues in ascending order.
    pub fn eigenvalues(&self) -> Vec<f64> {
        let mut v: Vec<f64> = self.eigenvalues.iter().copied().collect();
        v.sort_by(|a, b| a.total_cmp(b));
        v
    }

    /// `(smallest, largest)` singular value.
    pub fn singular_range(&self) -> (f64, f64) {
        let abs = self.eigenvalues.iter().map(|v| v.abs());
        let lo = abs.clone().fold(f64::INFINITY, f64::min);
        let hi = abs.fold(0.0, f64::max);
        (lo, hi)
    }

    pub fn is_positive(&self) -> bool {
        self.eigenvalues.iter().all(|v| *v > 0.0)
    }

    fn kernel(&self, cut: f64) -> Vec<Vec<f64>> {
        (0..self.eigenvalues.len())
            .filter(|&i| self.eigenvalues[i].abs() < cut)
            .map(|i| self.eigenvectors.column(i).iter().copied().collect())
            .collect()
    }

    pub fn solve(&self, g: &[f64]) -> Result<Vec<f64>> {
        let (lo, hi) = self.singular_range();
        if lo < DEGENERACY_THRESHOLD * hi {
            return Err(Error::Degenerate { sigma_min: lo, sigma_max: hi, kernel: self.kernel(DEGENERACY_THRESHOLD * hi) });
        }
        let gv = DVector::from_column_slice(g);
        let mut c = self.eigenvectors.tr_mul(&gv);
        for (ci, l) in c.iter_mut().zip(self.eigenvalues.iter()) {
            *ci /= l;
        }
        Ok((&self.eigenvectors * c).as_slice().to_vec())
    }

    /// `sum_j sum_m phi psi` times the grid spacing.
    pub fn inner(&self, grid: &PeriodicGrid, phi: &[f64], psi: &[f64]) -> f64 {
        let h = grid.length / grid.len() as f64;
        h * phi.iter().zip(psi).map(|(a, b)| a * b).sum::<f64>()
    }

    /// Splits a section into its components.
    pub fn components_of(&self, phi: &[f64]) -> Vec<Vec<f64>> {
        phi.chunks(self.samples).map(|c| c.to_vec()).collect()
    }

    /// Component-major section from per-component arrays.
    pub fn section(parts: &[Vec<f64>]) -> Vec<f64> {
        parts.iter().flat_map(|p| p.iter().copied()).collect()
    }

    pub fn zero_section(&self) -> Vec<f64> {
        vec![0.0; self.components * self.samples]
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{builtin_geometry, synthetic_geometry, BuiltinGeometry, FieldEntry, FourierSeries, SyntheticSpec};
    use core::f64::consts::PI;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn identity_potential() -> CurvatureData {
        // R_m11l = +delta_ml directly, shape operator zero
        let mut r = Vec::new();
        for m in 1..7 {
            r.push(FieldEntry { index: vec![m, 0, 0, m], series: FourierSeries::constant(1.0) });
        }
        let spec = SyntheticSpec { n: 8, length: 2.0 * PI, grid: 64, g_tilde: 1.0, h: Vec::new(), r: Some(r), gamma: Vec::new() };
        synthetic_geometry(&spec).unwrap()
    }

    fn smooth_section(rng: &mut ChaCha8Rng, grid: &PeriodicGrid, comps: usize) -> Vec<f64> {
        let mut out = Vec::new();
        for _ in 0..comps {
            let coef: Vec<(f64, f64)> = (0..5).map(|_| (rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))).collect();
            for y in &grid.y {
                let w = 2.0 * PI / grid.length;
                out.push(coef.iter().enumerate().map(|(k, (a, b))| a * (w * k as f64 * y).cos() + b * (w * k as f64 * y).sin()).sum());
            }
        }
        out
    }

    #[test]
    fn round_sphere_constant_section() {
        let cd = builtin_geometry(&BuiltinGeometry::RoundSphere, 8, 32).unwrap();
        let j = JacobiOperator::new(&cd).unwrap();
        let mut phi = j.zero_section();
        for v in phi[2 * 32..3 * 32].iter_mut() {
            *v = 1.0;
        }
        let out = j.apply(&phi);
        for (a, b) in out.iter().zip(&phi) {
            assert!((a + b).abs() < 1e-10);
        }
    }

    #[test]
    fn flat_periodic_laplacian() {
        let spec = SyntheticSpec { n: 8, length: 3.0, grid: 32, g_tilde: 1.0, h: Vec::new(), r: None, gamma: Vec::new() };
        let cd = synthetic_geometry(&spec).unwrap();
        let j = JacobiOperator::new(&cd).unwrap();
        let w = 2.0 * PI * 2.0 / 3.0;
        let mut phi = j.zero_section();
        for (k, y) in cd.grid.y.iter().enumerate() {
            phi[k] = (w * y).cos();
        }
        let out = j.apply(&phi);
        for (a, b) in out.iter().zip(&phi) {
            assert!((a - w * w * b).abs() < 1e-9);
        }
    }

    #[test]
    fn round_sphere_is_degenerate() {
        let cd = builtin_geometry(&BuiltinGeometry::RoundSphere, 8, 128).unwrap();
        let j = JacobiOperator::new(&cd).unwrap();
        let g = j.zero_section();
        match j.solve(&g) {
            Err(Error::Degenerate { kernel, .. }) => {
                assert_eq!(kernel.len(), 12);
                // every kernel vector lies in the span of cos y, sin y per component
                for v in &kernel {
                    for part in v.chunks(128) {
                        let (mut a, mut b) = (0.0, 0.0);
                        for (k, y) in cd.grid.y.iter().enumerate() {
                            a += part[k] * y.cos() / 64.0;
                            b += part[k] * y.sin() / 64.0;
                        }
                        for (k, y) in cd.grid.y.iter().enumerate() {
                            assert!((part[k] - a * y.cos() - b * y.sin()).abs() < 1e-10);
                        }
                    }
                }
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn identity_potential_inverse() {
        let cd = identity_potential();
        let j = JacobiOperator::new(&cd).unwrap();
        let mut g = j.zero_section();
        for (k, y) in cd.grid.y.iter().enumerate() {
            g[k] = y.cos();
        }
        let phi = j.solve(&g).unwrap();
        for (k, y) in cd.grid.y.iter().enumerate() {
            assert!((phi[k] - 0.5 * y.cos()).abs() < 1e-12);
        }
        assert!(phi[64..].iter().all(|v| v.abs() < 1e-12));
    }

    #[test]
    fn perturbed_sphere_is_invertible() {
        let cd = builtin_geometry(&BuiltinGeometry::PerturbedSphere { amplitude: 0.1 }, 8, 128).unwrap();
        let j = JacobiOperator::new(&cd).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let g = smooth_section(&mut rng, &cd.grid, 6);
        let phi = j.solve(&g).unwrap();
        let res = j.apply(&phi).iter().zip(&g).fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
        assert!(res <= 1e-8, "{res}");
    }

    #[test]
    fn self_adjoint() {
        let cd = builtin_geometry(&BuiltinGeometry::PerturbedSphere { amplitude: 0.1 }, 8, 64).unwrap();
        let j = JacobiOperator::new(&cd).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..5 {
            let a = smooth_section(&mut rng, &cd.grid, 6);
            let b = smooth_section(&mut rng, &cd.grid, 6);
            let l = j.inner(&cd.grid, &j.apply(&a), &b);
            let r = j.inner(&cd.grid, &a, &j.apply(&b));
            assert!((l - r).abs() <= 1e-10 * (1.0 + l.abs()), "{l} {r}");
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(16))]
        #[test]
        fn apply_is_linear(al in -2.0f64..2.0, be in -2.0f64..2.0, seed in 0u64..1000) {
            let cd = builtin_geometry(&BuiltinGeometry::PerturbedSphere { amplitude: 0.1 }, 8, 16).unwrap();
            let j = JacobiOperator::new(&cd).unwrap();
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let a = smooth_section(&mut rng, &cd.grid, 6);
            let b = smooth_section(&mut rng, &cd.grid, 6);
            let comb: Vec<f64> = a.iter().zip(&b).map(|(x, y)| al * x + be * y).collect();
            let lhs = j.apply(&comb);
            let (ja, jb) = (j.apply(&a), j.apply(&b));
            for k in 0..lhs.len() {
                prop_assert!((lhs[k] - al * ja[k] - be * jb[k]).abs() < 1e-11 * (1.0 + lhs[k].abs()));
            }
        }
    }
}
