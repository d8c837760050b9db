//! Smooth periodic functions on the unit torus.

use std::f64::consts::TAU;
use std::fmt;

use serde::{Deserialize, Serialize};

/// Highest harmonic allowed in a test function.
pub const MAX_TEST_DEGREE: usize = 8;

/// Something that can be evaluated (with its derivative) on the unit torus.
pub trait PeriodicField: Sync {
    fn value(&self, x: f64) -> f64;
    fn derivative(&self, x: f64) -> f64;
}

/// `a0 + Σ_k a_k cos(2πkx) + b_k sin(2πkx)`, `k = 1..=degree`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrigPoly {
    pub constant: f64,
    /// `cos[k-1]` multiplies `cos(2πkx)`.
    pub cos: Vec<f64>,
    pub sin: Vec<f64>,
}

impl TrigPoly {
    pub fn constant(value: f64) -> Self {
        Self {
            constant: value,
            cos: vec![],
            sin: vec![],
        }
    }

    /// `amplitude * sin(2π mode x)`
    pub fn sine(amplitude: f64, mode: usize) -> Self {
        let mut p = Self::constant(0.0);
        p.set_sin(mode, amplitude);
        p
    }

    pub fn cosine(amplitude: f64, mode: usize) -> Self {
        let mut p = Self::constant(0.0);
        p.set_cos(mode, amplitude);
        p
    }

    fn grow(&mut self, mode: usize) {
        if self.cos.len() < mode {
            self.cos.resize(mode, 0.0);
            self.sin.resize(mode, 0.0);
        }
    }

    pub fn set_sin(&mut self, mode: usize, amplitude: f64) {
        assert!(mode >= 1);
        self.grow(mode);
        self.sin[mode - 1] = amplitude;
    }

    pub fn set_cos(&mut self, mode: usize, amplitude: f64) {
        assert!(mode >= 1);
        self.grow(mode);
        self.cos[mode - 1] = amplitude;
    }

    pub fn degree(&self) -> usize {
        self.cos.len().max(self.sin.len())
    }

    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            constant: self.constant * factor,
            cos: self.cos.iter().map(|c| c * factor).collect(),
            sin: self.sin.iter().map(|s| s * factor).collect(),
        }
    }

    /// `sup |f|`, bounded by the sum of absolute coefficients and refined on a grid.
    pub fn max_abs(&self) -> f64 {
        let n = 64 * self.degree().max(1);
        (0..n)
            .map(|i| self.value(i as f64 / n as f64).abs())
            .fold(0.0, f64::max)
    }

    /// `(∫ f²)^{1/2}` over the torus.
    pub fn l2_norm(&self) -> f64 {
        let harmonics: f64 = self.cos.iter().chain(&self.sin).map(|c| c * c).sum();
        (self.constant * self.constant + 0.5 * harmonics).sqrt()
    }

    /// Test functions `cos(2πkx)`, `sin(2πkx)` for `k = 1..=degree`, with ids.
    pub fn basis(degree: usize) -> Vec<(String, TrigPoly)> {
        let mut out = Vec::with_capacity(2 * degree);
        for k in 1..=degree {
            out.push((format!("sin{k}"), Self::sine(1.0, k)));
            out.push((format!("cos{k}"), Self::cosine(1.0, k)));
        }
        out
    }
}

impl PeriodicField for TrigPoly {
    fn value(&self, x: f64) -> f64 {
        let mut total = self.constant;
        for (k, (c, s)) in self.cos.iter().zip(&self.sin).enumerate() {
            let arg = TAU * (k + 1) as f64 * x;
            total += c * arg.cos() + s * arg.sin();
        }
        total
    }

    fn derivative(&self, x: f64) -> f64 {
        let mut total = 0.0;
        for (k, (c, s)) in self.cos.iter().zip(&self.sin).enumerate() {
            let w = TAU * (k + 1) as f64;
            let arg = w * x;
            total += w * (s * arg.cos() - c * arg.sin());
        }
        total
    }
}

impl fmt::Display for TrigPoly {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.constant)?;
        for (k, (c, s)) in self.cos.iter().zip(&self.sin).enumerate() {
            if *c != 0.0 {
                write!(f, " + {c} cos(2π·{}x)", k + 1)?;
            }
            if *s != 0.0 {
                write!(f, " + {s} sin(2π·{}x)", k + 1)?;
            }
        }
        Ok(())
    }
}

/// Wraps `x` into `[0, 1)`.
#[inline]
pub fn wrap_unit(x: f64) -> f64 {
    let y = x - x.floor();
    if y >= 1.0 {
        0.0
    } else {
        y
    }
}
