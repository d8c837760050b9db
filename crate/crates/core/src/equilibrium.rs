//! One-site equilibrium measures and the macroscopic flux.
//!
//! `π(x) ∝ Π r(k)^{-1}` (products anchored at the spin nearest to 0), its log
//! moment generating function `F(θ)`, the tilted family `π_θ`, the density map
//! `v(θ) = F'(θ)` with its inverse, and `Φ̂(v) = E_{θ(v)} c(z_1, z_2)`.
//! Everything is stored uncentered.

use serde::Serialize;
use thiserror::Error;

use crate::model::{derive_r, ModelError, RateModel, Spin};

/// Default discarded-mass budget.
pub const DEFAULT_EPS_TAIL: f64 = 1e-12;
/// Half-width of the spin window for unbounded spin spaces.
pub const DEFAULT_MAX_WINDOW: Spin = 512;
/// `|θ|` cap for bounded spin spaces.
const THETA_CAP: f64 = 40.0;
const LOOKAHEAD: Spin = 64;
/// Degeneracy threshold for the Burgers nonlinearity.
pub const C0_DEGENERATE: f64 = 1e-8;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EquilibriumError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("partition function diverges: discarded mass {tail:e} at θ = 0 exceeds {eps_tail:e} within the spin window")]
    Divergent { tail: f64, eps_tail: f64 },
    #[error("θ = {theta} outside the numeric domain ({min}, {max})")]
    ThetaDomain { theta: f64, min: f64, max: f64 },
    #[error("density {v} outside the attainable range ({min}, {max})")]
    DensityRange { v: f64, min: f64, max: f64 },
    #[error("eps_tail must lie in (0, 1e-6], got {0}")]
    EpsTail(f64),
}

/// Moments of `π_θ`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Moments {
    pub log_mgf: f64,
    pub mean: f64,
    pub variance: f64,
}

/// The tilted one-site family `π_θ` on a finite spin window.
#[derive(Debug, Clone)]
pub struct EquilibriumFamily {
    model: RateModel,
    lo: Spin,
    /// normalised `log π(z)` for `z = lo, lo + 1, ...`
    log_pi: Vec<f64>,
    theta_min: f64,
    theta_max: f64,
    v_min: f64,
    v_max: f64,
    eps_tail: f64,
}

impl EquilibriumFamily {
    pub fn build(model: &RateModel, eps_tail: f64) -> Result<Self, EquilibriumError> {
        Self::build_with_gauge(model, eps_tail, 1.0)
    }

    /// Builds the family from `gauge * r`. The gauge only tilts `π`, so the
    /// family as a set and everything expressed in terms of densities is
    /// unchanged.
    pub fn build_with_gauge(
        model: &RateModel,
        eps_tail: f64,
        gauge: f64,
    ) -> Result<Self, EquilibriumError> {
        if !(eps_tail > 0.0 && eps_tail <= 1e-6) {
            return Err(EquilibriumError::EpsTail(eps_tail));
        }
        let bounds = model.bounds();
        let half = DEFAULT_MAX_WINDOW;
        let (lo, hi) = bounds.window(half);
        let r_of = r_function(model, half + LOOKAHEAD)?;
        let r = |z: Spin| gauge * r_of(z);

        let anchor = 0.clamp(lo, hi);
        let len = (hi - lo + 1) as usize;
        let mut log_pi = vec![0.0; len];
        for z in (anchor + 1)..=hi {
            let i = (z - lo) as usize;
            log_pi[i] = log_pi[i - 1] - r(z).ln();
        }
        for z in (lo..anchor).rev() {
            let i = (z - lo) as usize;
            log_pi[i] = log_pi[i + 1] + r(z + 1).ln();
        }

        let upper_open = bounds.z_max.is_none();
        let lower_open = bounds.z_min.is_none();
        // geometric-tail estimates beyond the window, relative to window mass
        let min_r_above = (hi + 1..=hi + LOOKAHEAD)
            .map(&r)
            .fold(f64::INFINITY, f64::min);
        let max_r_below = (lo - LOOKAHEAD + 1..=lo).map(&r).fold(0.0, f64::max);
        let tail = |theta: f64| -> f64 {
            let mass = log_sum_exp(
                log_pi
                    .iter()
                    .enumerate()
                    .map(|(i, lp)| lp + theta * (lo + i as Spin) as f64),
            );
            let mut total = 0.0;
            if upper_open {
                let q = theta.exp() / min_r_above;
                if q >= 1.0 {
                    return f64::INFINITY;
                }
                let edge = log_pi[len - 1] + theta * hi as f64 - mass;
                total += (edge + (q / (1.0 - q)).ln()).exp();
            }
            if lower_open {
                // π_θ(z - 1) / π_θ(z) = e^{-θ} r(z)
                let q = (-theta).exp() * max_r_below;
                if q >= 1.0 {
                    return f64::INFINITY;
                }
                let edge = log_pi[0] + theta * lo as f64 - mass;
                total += (edge + (q / (1.0 - q)).ln()).exp();
            }
            total
        };

        let at_zero = tail(0.0);
        if !(at_zero < eps_tail) {
            return Err(EquilibriumError::Divergent {
                tail: at_zero,
                eps_tail,
            });
        }
        let theta_max = if upper_open {
            boundary_theta(|t| tail(t) < eps_tail, 1.0)
        } else {
            THETA_CAP
        };
        let theta_min = if lower_open {
            boundary_theta(|t| tail(t) < eps_tail, -1.0)
        } else {
            -THETA_CAP
        };

        let log_z = log_sum_exp(log_pi.iter().copied());
        log_pi.iter_mut().for_each(|lp| *lp -= log_z);

        let mut family = Self {
            model: model.clone(),
            lo,
            log_pi,
            theta_min,
            theta_max,
            v_min: 0.0,
            v_max: 0.0,
            eps_tail,
        };
        family.v_min = family.moments_unchecked(theta_min).mean;
        family.v_max = family.moments_unchecked(theta_max).mean;
        Ok(family)
    }

    pub fn model(&self) -> &RateModel {
        &self.model
    }

    pub fn eps_tail(&self) -> f64 {
        self.eps_tail
    }

    /// Spin window `[lo, hi]` carrying the measure.
    pub fn window(&self) -> (Spin, Spin) {
        (self.lo, self.lo + self.log_pi.len() as Spin - 1)
    }

    pub fn theta_domain(&self) -> (f64, f64) {
        (self.theta_min, self.theta_max)
    }

    /// Open interval of attainable densities.
    pub fn density_range(&self) -> (f64, f64) {
        (self.v_min, self.v_max)
    }

    pub fn log_pi(&self, z: Spin) -> f64 {
        let (lo, hi) = self.window();
        if z < lo || z > hi {
            f64::NEG_INFINITY
        } else {
            self.log_pi[(z - lo) as usize]
        }
    }

    fn check_theta(&self, theta: f64) -> Result<(), EquilibriumError> {
        if theta.is_finite() && theta >= self.theta_min && theta <= self.theta_max {
            Ok(())
        } else {
            Err(EquilibriumError::ThetaDomain {
                theta,
                min: self.theta_min,
                max: self.theta_max,
            })
        }
    }

    fn moments_unchecked(&self, theta: f64) -> Moments {
        let lo = self.lo as f64;
        let exps: Vec<f64> = self
            .log_pi
            .iter()
            .enumerate()
            .map(|(i, lp)| lp + theta * (lo + i as f64))
            .collect();
        let peak = exps.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let weights: Vec<f64> = exps.iter().map(|e| (e - peak).exp()).collect();
        let total: f64 = weights.iter().sum();
        let mean = weights
            .iter()
            .enumerate()
            .map(|(i, w)| w * (lo + i as f64))
            .sum::<f64>()
            / total;
        let variance = weights
            .iter()
            .enumerate()
            .map(|(i, w)| {
                let d = lo + i as f64 - mean;
                w * d * d
            })
            .sum::<f64>()
            / total;
        Moments {
            log_mgf: peak + total.ln(),
            mean,
            variance,
        }
    }

    /// `F(θ)`, `F'(θ)` and `F''(θ)`.
    pub fn moments(&self, theta: f64) -> Result<Moments, EquilibriumError> {
        self.check_theta(theta)?;
        Ok(self.moments_unchecked(theta))
    }

    pub fn log_mgf(&self, theta: f64) -> Result<f64, EquilibriumError> {
        Ok(self.moments(theta)?.log_mgf)
    }

    /// `v(θ) = F'(θ)`.
    pub fn density(&self, theta: f64) -> Result<f64, EquilibriumError> {
        Ok(self.moments(theta)?.mean)
    }

    /// `π_θ(z)` for `z` in the window, starting at `window().0`.
    pub fn pmf(&self, theta: f64) -> Result<Vec<f64>, EquilibriumError> {
        let m = self.moments(theta)?;
        let lo = self.lo as f64;
        Ok(self
            .log_pi
            .iter()
            .enumerate()
            .map(|(i, lp)| (lp + theta * (lo + i as f64) - m.log_mgf).exp())
            .collect())
    }

    /// Inverse of `v(θ)`: safeguarded Newton with a bisection fallback.
    pub fn theta_of_v(&self, v: f64) -> Result<f64, EquilibriumError> {
        if !(v > self.v_min && v < self.v_max) {
            return Err(EquilibriumError::DensityRange {
                v,
                min: self.v_min,
                max: self.v_max,
            });
        }
        let (mut a, mut b) = (self.theta_min, self.theta_max);
        let mut theta = 0.0_f64.clamp(a, b);
        let mut best = (f64::INFINITY, theta);
        for _ in 0..200 {
            let m = self.moments_unchecked(theta);
            let residual = m.mean - v;
            if residual.abs() < best.0 {
                best = (residual.abs(), theta);
            }
            if residual.abs() <= 1e-14 * v.abs().max(1.0) {
                return Ok(theta);
            }
            if residual < 0.0 {
                a = theta;
            } else {
                b = theta;
            }
            let newton = theta - residual / m.variance;
            let next = if newton.is_finite() && newton > a && newton < b {
                newton
            } else {
                0.5 * (a + b)
            };
            if next == theta || b - a <= f64::EPSILON * theta.abs().max(1.0) {
                break;
            }
            theta = next;
        }
        Ok(best.1)
    }

    /// `Φ̂(v) = Σ π_θ(x) π_θ(y) c(x, y)` at `θ = θ(v)`. At a finite end of
    /// `S` the measure is a point mass and the flux is `c(z, z)`.
    pub fn flux_hat(&self, v: f64) -> Result<f64, EquilibriumError> {
        let b = self.model.bounds();
        for z in [b.z_min, b.z_max].into_iter().flatten() {
            if v == z as f64 {
                return Ok(self.model.rate(z, z));
            }
        }
        let theta = self.theta_of_v(v)?;
        Ok(self.expected_rate(theta))
    }

    fn expected_rate(&self, theta: f64) -> f64 {
        let pmf = self.pmf(theta).expect("θ inside domain");
        let peak = pmf.iter().copied().fold(0.0, f64::max);
        let support: Vec<(Spin, f64)> = pmf
            .iter()
            .enumerate()
            .filter(|(_, &p)| p > peak * 1e-24)
            .map(|(i, &p)| (self.lo + i as Spin, p))
            .collect();
        let mut total = 0.0;
        for &(x, px) in &support {
            let row: f64 = support
                .iter()
                .map(|&(y, py)| py * self.model.rate(x, y))
                .sum();
            total += px * row;
        }
        total
    }

    /// `(Φ̂, Φ̂', Φ̂'')` at `v0` from Richardson-extrapolated fourth-order central
    /// differences. `step = None` picks a step from the attainable range.
    pub fn flux_derivatives(
        &self,
        v0: f64,
        step: Option<f64>,
    ) -> Result<FluxDerivatives, EquilibriumError> {
        let a0 = self.flux_hat(v0)?;
        let room = (v0 - self.v_min).min(self.v_max - v0);
        let h = step.unwrap_or(0.05).min(room / 4.0);
        let f = |v: f64| self.flux_hat(v);
        let stencil = |h: f64| -> Result<(f64, f64), EquilibriumError> {
            let (m2, m1, p1, p2) = (f(v0 - 2.0 * h)?, f(v0 - h)?, f(v0 + h)?, f(v0 + 2.0 * h)?);
            let d1 = (m2 - 8.0 * m1 + 8.0 * p1 - p2) / (12.0 * h);
            let d2 = (-m2 + 16.0 * m1 - 30.0 * a0 + 16.0 * p1 - p2) / (12.0 * h * h);
            Ok((d1, d2))
        };
        let (b_h, c_h) = stencil(h)?;
        let (b_half, c_half) = stencil(h / 2.0)?;
        let b0 = (16.0 * b_half - b_h) / 15.0;
        let c0 = (16.0 * c_half - c_h) / 15.0;
        Ok(FluxDerivatives {
            v0,
            a0,
            b0,
            c0,
            step: h,
            richardson_error: (b_half - b_h).abs().max((c_half - c_h).abs()),
            degenerate: c0.abs() < C0_DEGENERATE,
        })
    }

    /// `H(π_{θ2} | π_{θ1}) = (θ2 - θ1) F'(θ2) - F(θ2) + F(θ1)`.
    pub fn site_entropy(&self, theta2: f64, theta1: f64) -> Result<f64, EquilibriumError> {
        let m2 = self.moments(theta2)?;
        let m1 = self.moments(theta1)?;
        let d = theta2 - theta1;
        if d == 0.0 {
            return Ok(0.0);
        }
        if d.abs() < 1e-3 {
            // ∫_{θ1}^{θ2} (θ2 - s) F''(s) ds by Gauss–Legendre; avoids cancellation
            const NODES: [f64; 4] = [
                -0.861_136_311_594_053,
                -0.339_981_043_584_856,
                0.339_981_043_584_856,
                0.861_136_311_594_053,
            ];
            const WEIGHTS: [f64; 4] = [
                0.347_854_845_137_454,
                0.652_145_154_862_546,
                0.652_145_154_862_546,
                0.347_854_845_137_454,
            ];
            let mid = 0.5 * (theta1 + theta2);
            let sum: f64 = NODES
                .iter()
                .zip(WEIGHTS)
                .map(|(x, w)| {
                    let s = mid + 0.5 * d * x;
                    w * (theta2 - s) * self.moments_unchecked(s).variance
                })
                .sum();
            return Ok(0.5 * d * sum);
        }
        Ok((d * m2.mean - m2.log_mgf + m1.log_mgf).max(0.0))
    }

    /// `θ'(v) = 1 / F''(θ(v))`.
    pub fn theta_prime(&self, v: f64) -> Result<f64, EquilibriumError> {
        let theta = self.theta_of_v(v)?;
        Ok(1.0 / self.moments_unchecked(theta).variance)
    }

    /// Samples `(v, Φ̂, Φ̂', Φ̂'')` on a grid, as written to `flux.csv`.
    pub fn flux_curve(&self, v0: f64, grid: &[f64]) -> Result<FluxCurve, EquilibriumError> {
        let at_v0 = self.flux_derivatives(v0, None)?;
        let samples = grid
            .iter()
            .map(|&v| {
                let d = self.flux_derivatives(v, None)?;
                Ok(FluxSample {
                    v,
                    flux_hat: d.a0,
                    b: d.b0,
                    c: d.c0,
                })
            })
            .collect::<Result<Vec<_>, EquilibriumError>>()?;
        let linear_bound = samples
            .iter()
            .map(|s| (s.flux_hat - at_v0.a0).abs() / (1.0 + (s.v - v0).abs()))
            .fold(0.0, f64::max);
        Ok(FluxCurve {
            samples,
            v0,
            a0: at_v0.a0,
            b0: at_v0.b0,
            c0: at_v0.c0,
            linear_bound,
        })
    }

    /// Evenly spaced interior densities, clipped to a sensible range for
    /// unbounded spins.
    pub fn density_grid(&self, points: usize) -> Vec<f64> {
        let lo = self.v_min;
        let hi = if self.model.bounds().z_max.is_some() {
            self.v_max
        } else {
            self.v_max.min(lo.max(0.0) + 20.0)
        };
        let lo = if self.model.bounds().z_min.is_some() {
            lo
        } else {
            lo.max(hi - 40.0)
        };
        (1..=points)
            .map(|i| lo + (hi - lo) * i as f64 / (points + 1) as f64)
            .collect()
    }
}

/// Result of [`EquilibriumFamily::flux_derivatives`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FluxDerivatives {
    pub v0: f64,
    pub a0: f64,
    pub b0: f64,
    pub c0: f64,
    pub step: f64,
    pub richardson_error: f64,
    /// `|c0|` is below [`C0_DEGENERATE`]; Burgers experiments are refused.
    pub degenerate: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FluxSample {
    pub v: f64,
    pub flux_hat: f64,
    pub b: f64,
    pub c: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FluxCurve {
    pub samples: Vec<FluxSample>,
    pub v0: f64,
    pub a0: f64,
    pub b0: f64,
    pub c0: f64,
    /// Smallest `C` with `|Φ̂(v) - a0| <= C (1 + |v - v0|)` on the grid.
    pub linear_bound: f64,
}

fn r_function(model: &RateModel, half: Spin) -> Result<Box<dyn Fn(Spin) -> f64 + '_>, ModelError> {
    if model.native_r(1).is_some() {
        return Ok(Box::new(move |z| model.native_r(z).unwrap_or(f64::NAN)));
    }
    let derived = derive_r(model, half)?;
    Ok(Box::new(move |z| derived.get(z).unwrap_or(f64::INFINITY)))
}

/// Largest `|θ|` (in direction `sign`) for which `ok` holds, assuming `ok(0)`.
fn boundary_theta(ok: impl Fn(f64) -> bool, sign: f64) -> f64 {
    let mut good = 0.0;
    let mut step = 0.25;
    let mut bad = None;
    while good < THETA_CAP {
        let trial = (good + step).min(THETA_CAP);
        if ok(sign * trial) {
            good = trial;
            step *= 2.0;
        } else {
            bad = Some(trial);
            break;
        }
    }
    let Some(mut bad) = bad else {
        return sign * good;
    };
    for _ in 0..60 {
        let mid = 0.5 * (good + bad);
        if ok(sign * mid) {
            good = mid;
        } else {
            bad = mid;
        }
    }
    sign * good
}

pub(crate) fn log_sum_exp(values: impl Iterator<Item = f64> + Clone) -> f64 {
    let peak = values.clone().fold(f64::NEG_INFINITY, f64::max);
    if !peak.is_finite() {
        return peak;
    }
    peak + values.map(|v| (v - peak).exp()).sum::<f64>().ln()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{catalog, Catalog, RFamily};
    use approx::assert_abs_diff_eq;

    fn family(entry: Catalog) -> EquilibriumFamily {
        EquilibriumFamily::build(&catalog(&entry).unwrap(), DEFAULT_EPS_TAIL).unwrap()
    }

    #[test]
    fn tasep_measure_is_uniform() {
        let f = family(Catalog::Tasep);
        let p = f.pmf(0.0).unwrap();
        assert_abs_diff_eq!(p[0], 0.5, epsilon = 1e-15);
        assert_abs_diff_eq!(p[1], 0.5, epsilon = 1e-15);
        for theta in [-2.0, 0.0, 0.7, 3.0] {
            let expected = ((1.0 + f64::exp(theta)) / 2.0).ln();
            assert_abs_diff_eq!(f.log_mgf(theta).unwrap(), expected, epsilon = 1e-14);
        }
    }

    #[test]
    fn linear_zero_range_is_poisson() {
        let f = family(Catalog::ZeroRange(RFamily::Linear));
        let p = f.pmf(0.0).unwrap();
        let mut factorial = 1.0;
        for (x, px) in p.iter().take(15).enumerate() {
            if x > 0 {
                factorial *= x as f64;
            }
            assert_abs_diff_eq!(*px, (-1.0f64).exp() / factorial, epsilon = 1e-15);
        }
        for theta in [-1.0, 0.0, 0.5, 2.0] {
            assert_abs_diff_eq!(
                f.log_mgf(theta).unwrap(),
                theta.exp() - 1.0,
                epsilon = 1e-12
            );
        }
        assert!(f.log_mgf(0.0).unwrap().abs() < 1e-14);
    }

    #[test]
    fn constant_bricklayers_rate_diverges() {
        let m = catalog(&Catalog::Bricklayers(RFamily::Table(vec![1.0]))).unwrap();
        let err = EquilibriumFamily::build(&m, DEFAULT_EPS_TAIL).unwrap_err();
        assert!(matches!(err, EquilibriumError::Divergent { .. }));
    }

    #[test]
    fn eps_tail_is_range_checked() {
        let m = catalog(&Catalog::Tasep).unwrap();
        assert!(matches!(
            EquilibriumFamily::build(&m, 1e-3),
            Err(EquilibriumError::EpsTail(_))
        ));
    }

    #[test]
    fn theta_of_v_examples() {
        let f = family(Catalog::Tasep);
        assert_abs_diff_eq!(f.theta_of_v(0.5).unwrap(), 0.0, epsilon = 1e-13);
        let e = 1f64.exp();
        assert_abs_diff_eq!(f.theta_of_v(e / (1.0 + e)).unwrap(), 1.0, epsilon = 1e-12);
        let zr = family(Catalog::ZeroRange(RFamily::Linear));
        assert_abs_diff_eq!(zr.theta_of_v(1.0).unwrap(), 0.0, epsilon = 1e-13);
        assert!(matches!(
            f.theta_of_v(1.5),
            Err(EquilibriumError::DensityRange { .. })
        ));
        assert!(matches!(
            zr.theta_of_v(-0.1),
            Err(EquilibriumError::DensityRange { .. })
        ));
    }

    #[test]
    fn theta_outside_domain_is_an_error() {
        let zr = family(Catalog::ZeroRange(RFamily::Table(vec![2.0])));
        let (_, max) = zr.theta_domain();
        assert!(max < 2f64.ln());
        assert!(matches!(
            zr.log_mgf(max + 0.1),
            Err(EquilibriumError::ThetaDomain { .. })
        ));
    }

    #[test]
    fn flux_examples() {
        let f = family(Catalog::Tasep);
        assert_abs_diff_eq!(f.flux_hat(0.5).unwrap(), 0.25, epsilon = 1e-14);
        let zr = family(Catalog::ZeroRange(RFamily::Linear));
        assert_abs_diff_eq!(zr.flux_hat(2.5).unwrap(), 2.5, epsilon = 1e-11);
        let zr_affine = family(Catalog::ZeroRange(RFamily::Affine {
            intercept: 1.0,
            slope: 1.0,
        }));
        assert!(zr_affine.flux_hat(1e-9).unwrap() < 1e-8);
        assert_eq!(f.flux_hat(0.0).unwrap(), 0.0);
        assert_eq!(f.flux_hat(1.0).unwrap(), 0.0);
        assert_eq!(zr.flux_hat(0.0).unwrap(), 0.0);
    }

    #[test]
    fn flux_derivative_examples() {
        let f = family(Catalog::Tasep);
        let d = f.flux_derivatives(0.5, None).unwrap();
        assert_abs_diff_eq!(d.a0, 0.25, epsilon = 1e-12);
        assert_abs_diff_eq!(d.b0, 0.0, epsilon = 1e-9);
        assert_abs_diff_eq!(d.c0, -2.0, epsilon = 1e-8);
        assert!(!d.degenerate);
        let d = f.flux_derivatives(0.25, None).unwrap();
        assert_abs_diff_eq!(d.b0, 0.5, epsilon = 1e-9);
        let zr = family(Catalog::ZeroRange(RFamily::Linear));
        let d = zr.flux_derivatives(1.0, None).unwrap();
        assert!(d.degenerate, "c0 = {}", d.c0);
    }

    #[test]
    fn site_entropy_matches_direct_sum() {
        let f = family(Catalog::Tasep);
        let p2 = f.pmf(0.2).unwrap();
        let p1 = f.pmf(0.0).unwrap();
        let direct: f64 = p2.iter().zip(&p1).map(|(a, b)| a * (a / b).ln()).sum();
        assert_abs_diff_eq!(f.site_entropy(0.2, 0.0).unwrap(), direct, epsilon = 1e-15);
        assert_eq!(f.site_entropy(0.3, 0.3).unwrap(), 0.0);
        // small-gap branch against the closed form at moderate gap
        let tiny = f.site_entropy(0.2 + 5e-4, 0.2).unwrap();
        let var = f.moments(0.2).unwrap().variance;
        assert!((tiny / (0.5 * var * 25e-8) - 1.0).abs() < 1e-3);
    }

    #[test]
    fn entropy_symmetry_identity() {
        let f = family(Catalog::KExclusion { k: 2, alpha: None });
        for theta in [-1.0, 0.3, 1.7] {
            let lhs = f.site_entropy(theta, 0.0).unwrap() + f.site_entropy(0.0, theta).unwrap();
            let rhs = theta * (f.density(theta).unwrap() - f.density(0.0).unwrap());
            assert_abs_diff_eq!(lhs, rhs, epsilon = 1e-13);
        }
    }

    #[test]
    fn density_is_strictly_increasing() {
        for entry in [
            Catalog::Tasep,
            Catalog::ZeroRange(RFamily::Linear),
            Catalog::Bricklayers(RFamily::Linear),
        ] {
            let f = family(entry);
            let (a, b) = f.theta_domain();
            // past |theta| ~ 20 the bounded families saturate in f64
            let (a, b) = (a.max(-20.0), b.min(20.0));
            let mut last = f64::NEG_INFINITY;
            for i in 0..=50 {
                let theta = a + (b - a) * (0.01 + 0.98 * i as f64 / 50.0);
                let m = f.moments(theta).unwrap();
                assert!(m.variance > 0.0);
                assert!(m.mean > last);
                last = m.mean;
            }
        }
    }

    #[test]
    fn gauge_only_tilts_the_family() {
        for entry in [
            Catalog::KExclusion { k: 2, alpha: None },
            Catalog::ZeroRange(RFamily::Affine {
                intercept: 0.5,
                slope: 1.0,
            }),
            Catalog::Bricklayers(RFamily::Linear),
        ] {
            let m = catalog(&entry).unwrap();
            let base = EquilibriumFamily::build(&m, DEFAULT_EPS_TAIL).unwrap();
            for lambda in [0.5, 2.0] {
                let g = EquilibriumFamily::build_with_gauge(&m, DEFAULT_EPS_TAIL, lambda).unwrap();
                for theta in [-0.4, 0.0, 0.6] {
                    let v = base.density(theta).unwrap();
                    let vg = g.density(theta + lambda.ln()).unwrap();
                    assert!((v - vg).abs() < 1e-12, "{entry:?} λ={lambda}: {v} vs {vg}");
                    let fb = base.flux_hat(v).unwrap();
                    let fg = g.flux_hat(v).unwrap();
                    assert!((fb - fg).abs() < 1e-12 * fb.max(1.0), "{fb} vs {fg}");
                }
            }
        }
    }

    #[test]
    fn tail_truncation_is_stable() {
        let m = catalog(&Catalog::ZeroRange(RFamily::Affine {
            intercept: 0.5,
            slope: 0.8,
        }))
        .unwrap();
        let coarse = EquilibriumFamily::build(&m, 1e-8).unwrap();
        let fine = EquilibriumFamily::build(&m, 0.5e-8).unwrap();
        for v in [0.5, 1.0, 3.0] {
            let d = (coarse.flux_hat(v).unwrap() - fine.flux_hat(v).unwrap()).abs();
            assert!(d < 10.0 * 1e-8);
        }
    }

    #[test]
    fn flux_curve_has_linear_bound() {
        let f = family(Catalog::ZeroRange(RFamily::Affine {
            intercept: 1.0,
            slope: 0.5,
        }));
        let grid = f.density_grid(21);
        let curve = f.flux_curve(1.0, &grid).unwrap();
        assert_eq!(curve.samples.len(), 21);
        assert!(curve.linear_bound.is_finite() && curve.linear_bound < 5.0);
    }
}
