//! Truncated Fourier representation of smooth 1-periodic coefficients.
//!
//! The rotational coefficients a(θ), b(θ), c(θ) and the forcing A(θ) are all
//! stored in this form: a mean plus at most [`MAX_HARMONICS`] harmonics.
//! Periodicity f(θ) = f(θ+1) is then exact by construction, derivatives and
//! period means are exact, and the representation serializes cleanly.

use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::error::{FclError, Result};

/// Hard cap on the number of Fourier harmonics.
pub const MAX_HARMONICS: usize = 16;

/// One Fourier harmonic: k ≥ 1 with cos and sin coefficients.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Harmonic {
    pub k: u32,
    pub cos_coeff: f64,
    pub sin_coeff: f64,
}

/// f(θ) = mean + Σ_j [cos_j·cos(2π k_j θ) + sin_j·sin(2π k_j θ)].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PeriodicFn {
    pub mean: f64,
    pub harmonics: Vec<Harmonic>,
}

impl PeriodicFn {
    /// Constant function.
    pub fn constant(v: f64) -> Self {
        PeriodicFn {
            mean: v,
            harmonics: Vec::new(),
        }
    }

    /// Builds from (k, cos, sin) triples; rejects k = 0, duplicate k, or more
    /// than [`MAX_HARMONICS`] entries.
    pub fn new(mean: f64, harmonics: Vec<Harmonic>) -> Result<Self> {
        if harmonics.len() > MAX_HARMONICS {
            return Err(FclError::Domain(format!(
                "PeriodicFn: {} harmonics exceeds the cap of {MAX_HARMONICS}",
                harmonics.len()
            )));
        }
        for h in &harmonics {
            if h.k == 0 {
                return Err(FclError::Domain("PeriodicFn: harmonic index k = 0".into()));
            }
        }
        let mut seen: Vec<u32> = harmonics.iter().map(|h| h.k).collect();
        seen.sort_unstable();
        seen.dedup();
        if seen.len() != harmonics.len() {
            return Err(FclError::Domain(
                "PeriodicFn: duplicate harmonic index".into(),
            ));
        }
        Ok(PeriodicFn { mean, harmonics })
    }

    /// Evaluates f(θ). θ is reduced mod 1 first, so the lift can be passed
    /// directly and periodicity is exact.
    pub fn eval(&self, theta: f64) -> f64 {
        let t = theta.rem_euclid(1.0);
        let mut v = self.mean;
        for h in &self.harmonics {
            let w = 2.0 * PI * h.k as f64 * t;
            v += h.cos_coeff * w.cos() + h.sin_coeff * w.sin();
        }
        v
    }

    /// Exact derivative f'(θ).
    pub fn deriv(&self, theta: f64) -> f64 {
        let t = theta.rem_euclid(1.0);
        let mut v = 0.0;
        for h in &self.harmonics {
            let om = 2.0 * PI * h.k as f64;
            let w = om * t;
            v += om * (-h.cos_coeff * w.sin() + h.sin_coeff * w.cos());
        }
        v
    }

    /// Exact mean over one period (harmonics integrate to zero).
    pub fn period_mean(&self) -> f64 {
        self.mean
    }

    /// Upper bound on |f'| (sum of harmonic derivative amplitudes).
    fn deriv_bound(&self) -> f64 {
        self.harmonics
            .iter()
            .map(|h| 2.0 * PI * h.k as f64 * (h.cos_coeff.abs() + h.sin_coeff.abs()))
            .sum()
    }

    /// Certified strict positivity: min over 4096 uniform samples minus the
    /// worst possible excursion between samples (|f'|·half-spacing) must be
    /// positive.
    pub fn is_certified_positive(&self) -> bool {
        const N: usize = 4096;
        let mut min = f64::INFINITY;
        for i in 0..N {
            min = min.min(self.eval(i as f64 / N as f64));
        }
        min - self.deriv_bound() / (2.0 * N as f64) > 0.0
    }

    /// Like [`is_certified_positive`] but as a checked constructor step.
    pub fn require_positive(&self, name: &str) -> Result<()> {
        if self.is_certified_positive() {
            Ok(())
        } else {
            Err(FclError::AssumptionViolated(format!(
                "coefficient {name} is not certifiably positive"
            )))
        }
    }
}

/// Least-squares / DFT fit of samples on a uniform θ-grid to a `PeriodicFn`.
///
/// Keeps harmonics 1..=max_harmonics whose amplitude exceeds `threshold`.
/// Returns the fit and the maximum residual over the grid.
pub fn fit_periodic(samples: &[f64], max_harmonics: usize, threshold: f64) -> (PeriodicFn, f64) {
    let n = samples.len();
    let nf = n as f64;
    let mean = samples.iter().sum::<f64>() / nf;
    let mut harmonics = Vec::new();
    for k in 1..=max_harmonics.min(MAX_HARMONICS).min(n / 2) {
        let mut ck = 0.0;
        let mut sk = 0.0;
        for (j, &v) in samples.iter().enumerate() {
            let w = 2.0 * PI * k as f64 * j as f64 / nf;
            ck += v * w.cos();
            sk += v * w.sin();
        }
        ck *= 2.0 / nf;
        sk *= 2.0 / nf;
        if ck.abs() > threshold || sk.abs() > threshold {
            harmonics.push(Harmonic {
                k: k as u32,
                cos_coeff: ck,
                sin_coeff: sk,
            });
        }
    }
    let f = PeriodicFn { mean, harmonics };
    let mut max_res: f64 = 0.0;
    for (j, &v) in samples.iter().enumerate() {
        max_res = max_res.max((f.eval(j as f64 / nf) - v).abs());
    }
    (f, max_res)
}
