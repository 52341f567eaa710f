//! Fourier collocation on a uniform periodic grid of even size.

use num_traits::Float;
use crate::error::{Error, Result};
use alloc::format;
use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;

#[derive(Debug, Clone, PartialEq)]
pub struct PeriodicGrid {
    pub length: f64,
    pub y: Vec<f64>,
}

impl PeriodicGrid {
    pub fn new(n: usize, length: f64) -> Result<Self> {
        if n < 4 || n % 2 == 1 {
            return Err(Error::Validation(format!("periodic grid size must be even and at least 4, got {n}")));
        }
        if !(length > 0.0) {
            return Err(Error::Validation(format!("curve length must be positive, got {length}")));
        }
        Ok(Self { length, y: (0..n).map(|j| length * j as f64 / n as f64).collect() })
    }

    pub fn len(&self) -> usize {
        self.y.len()
    }

    pub fn is_empty(&self) -> bool {
        self.y.is_empty()
    }

    /// Row-major first-derivative matrix.
    pub fn d1(&self) -> Vec<f64> {
        let n = self.len();
        let h = 2.0 * PI / n as f64;
        let s = 2.0 * PI / self.length;
        let mut d = vec![0.0; n * n];
        for j in 0..n {
            for k in 0..n {
                if j != k {
                    let x = (j as f64 - k as f64) * h;
                    let sign = if (j + k) % 2 == 0 { 1.0 } else { -1.0 };
                    d[j * n + k] = s * 0.5 * sign / (0.5 * x).tan();
                }
            }
        }
        d
    }

    /// Row-major second-derivative matrix.
    pub fn d2(&self) -> Vec<f64> {
        let n = self.len();
        let h = 2.0 * PI / n as f64;
        let s = 2.0 * PI / self.length;
        let mut d = vec![0.0; n * n];
        for j in 0..n {
            for k in 0..n {
                d[j * n + k] = s * s
                    * if j == k {
                        -PI * PI / (3.0 * h * h) - 1.0 / 6.0
                    } else {
                        let x = (j as f64 - k as f64) * h;
                        let sign = if (j + k) % 2 == 0 { 1.0 } else { -1.0 };
                        -sign * 0.5 / (0.5 * x).sin().powi(2)
                    };
            }
        }
        d
    }

    pub fn apply(mat: &[f64], f: &[f64]) -> Vec<f64> {
        let n = f.len();
        (0..n).map(|j| (0..n).map(|k| mat[j * n + k] * f[k]).sum()).collect()
    }

    pub fn derivative(&self, f: &[f64]) -> Vec<f64> {
        Self::apply(&self.d1(), f)
    }

    pub fn second_derivative(&self, f: &[f64]) -> Vec<f64> {
        Self::apply(&self.d2(), f)
    }

    /// Trigonometric interpolant at an arbitrary `y`.
    pub fn interpolate(&self, f: &[f64], y: f64) -> f64 {
        let n = self.len();
        let s = 2.0 * PI / self.length;
        let mut acc = 0.0;
        for (j, fj) in f.iter().enumerate() {
            let x = s * (y - self.y[j]);
            let half = 0.5 * x;
            let t = half.tan();
            let w = if half.sin().abs() < 1e-14 { 1.0 } else { (n as f64 * half).sin() / (n as f64 * t) };
            acc += fj * w;
        }
        acc
    }

    /// `max_k |c_k|` over the top quarter of the spectrum relative to `max |c_k|`.
    pub fn spectral_tail(&self, f: &[f64]) -> f64 {
        let n = self.len();
        let mut mags = vec![0.0; n / 2 + 1];
        for (k, m) in mags.iter_mut().enumerate() {
            let (mut re, mut im) = (0.0, 0.0);
            for (j, fj) in f.iter().enumerate() {
                let a = 2.0 * PI * (k * j) as f64 / n as f64;
                re += fj * a.cos();
                im -= fj * a.sin();
            }
            *m = (re * re + im * im).sqrt() / n as f64;
        }
        let top = mags.iter().fold(0.0f64, |a, b| a.max(*b));
        if top == 0.0 {
            return 0.0;
        }
        let tail = mags[3 * n / 8..].iter().fold(0.0f64, |a, b| a.max(*b));
        tail / top
    }
}
