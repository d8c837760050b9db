//! Inviscid Burgers equation `∂t u + (c0/2) ∂x(u²) = 0` on the unit torus.
//!
//! The characteristics solver is exact up to root finding while the solution
//! stays classical; the Godunov scheme is a first-order reference solver for
//! cross-checks.

use serde::Serialize;
use thiserror::Error;

use crate::trig::{wrap_unit, PeriodicField};

/// Characteristics are only trusted up to this fraction of the shock time.
pub const HORIZON_MARGIN: f64 = 0.95;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum BurgersError {
    #[error("t = {t} is past the horizon {limit} = {margin} * T* (T* = {t_star})")]
    Horizon {
        t: f64,
        t_star: f64,
        limit: f64,
        margin: f64,
    },
    #[error("CFL number must lie in (0, 1), got {0}")]
    Cfl(f64),
    #[error("grid needs at least 2 points, got {0}")]
    Grid(usize),
    #[error("time must be finite and non-negative, got {0}")]
    Time(f64),
}

/// Periodic grid function with `values[i]` at `x_i = i / M`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Profile {
    pub values: Vec<f64>,
}

impl Profile {
    pub fn new(values: Vec<f64>) -> Self {
        Self { values }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn x(&self, i: usize) -> f64 {
        i as f64 / self.values.len() as f64
    }

    /// Point samples of `f`.
    pub fn sample(f: &impl PeriodicField, m: usize) -> Self {
        Self::new((0..m).map(|i| f.value(i as f64 / m as f64)).collect())
    }

    /// Averages of `f` over the cells `[x_i - dx/2, x_i + dx/2]`.
    pub fn cell_averages(f: &impl PeriodicField, m: usize) -> Self {
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
        let dx = 1.0 / m as f64;
        Self::new(
            (0..m)
                .map(|i| {
                    let c = i as f64 * dx;
                    0.5 * NODES
                        .iter()
                        .zip(WEIGHTS)
                        .map(|(s, w)| w * f.value(c + 0.5 * dx * s))
                        .sum::<f64>()
                })
                .collect(),
        )
    }

    /// `∫ u dx` by the periodic trapezoid rule.
    pub fn mean(&self) -> f64 {
        self.values.iter().sum::<f64>() / self.values.len() as f64
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.values
            .iter()
            .copied()
            .fold(f64::NEG_INFINITY, f64::max)
    }

    /// `∫ |u - w| dx`, both on the same grid.
    pub fn l1_distance(&self, other: &Profile) -> f64 {
        assert_eq!(self.len(), other.len());
        self.values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| (a - b).abs())
            .sum::<f64>()
            / self.len() as f64
    }

    /// `(∫ (u - w)²)^{1/2}`, both on the same grid.
    pub fn l2_distance(&self, other: &Profile) -> f64 {
        assert_eq!(self.len(), other.len());
        (self
            .values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| (a - b).powi(2))
            .sum::<f64>()
            / self.len() as f64)
            .sqrt()
    }

    /// `∫ φ u dx` by the periodic trapezoid rule (exact for trigonometric
    /// products below the grid's Nyquist limit).
    pub fn integrate_against(&self, phi: &impl PeriodicField) -> f64 {
        let m = self.len();
        self.values
            .iter()
            .enumerate()
            .map(|(i, u)| u * phi.value(i as f64 / m as f64))
            .sum::<f64>()
            / m as f64
    }

    fn slope(&self, i: usize) -> f64 {
        let m = self.len();
        let next = self.values[(i + 1) % m];
        let prev = self.values[(i + m - 1) % m];
        (next - prev) * m as f64 / 2.0
    }

    fn cell(&self, x: f64) -> (usize, f64) {
        let m = self.len();
        let s = wrap_unit(x) * m as f64;
        let i = (s.floor() as usize).min(m - 1);
        (i, s - i as f64)
    }
}

/// Periodic cubic Hermite interpolation with central-difference slopes.
impl PeriodicField for Profile {
    fn value(&self, x: f64) -> f64 {
        let m = self.len();
        let (i, s) = self.cell(x);
        let dx = 1.0 / m as f64;
        let (p0, p1) = (self.values[i], self.values[(i + 1) % m]);
        let (m0, m1) = (self.slope(i) * dx, self.slope((i + 1) % m) * dx);
        let s2 = s * s;
        let s3 = s2 * s;
        (2.0 * s3 - 3.0 * s2 + 1.0) * p0
            + (s3 - 2.0 * s2 + s) * m0
            + (-2.0 * s3 + 3.0 * s2) * p1
            + (s3 - s2) * m1
    }

    fn derivative(&self, x: f64) -> f64 {
        let m = self.len();
        let (i, s) = self.cell(x);
        let dx = 1.0 / m as f64;
        let (p0, p1) = (self.values[i], self.values[(i + 1) % m]);
        let (m0, m1) = (self.slope(i) * dx, self.slope((i + 1) % m) * dx);
        let s2 = s * s;
        ((6.0 * s2 - 6.0 * s) * p0
            + (3.0 * s2 - 4.0 * s + 1.0) * m0
            + (-6.0 * s2 + 6.0 * s) * p1
            + (3.0 * s2 - 2.0 * s) * m1)
            / dx
    }
}

/// `T* = 1 / max_x(-c0 u0'(x))`, or `+inf` when nothing compresses.
pub fn shock_time(u0: &impl PeriodicField, c0: f64) -> f64 {
    const SAMPLES: usize = 8192;
    let steep = |x: f64| -c0 * u0.derivative(x);
    let (best_i, _) = (0..SAMPLES)
        .map(|i| (i, steep(i as f64 / SAMPLES as f64)))
        .fold((0, f64::NEG_INFINITY), |acc, cur| {
            if cur.1 > acc.1 {
                cur
            } else {
                acc
            }
        });
    // golden-section refinement around the best sample
    let h = 1.0 / SAMPLES as f64;
    let (mut a, mut b) = ((best_i as f64 - 1.0) * h, (best_i as f64 + 1.0) * h);
    let g = 0.5 * (5f64.sqrt() - 1.0);
    for _ in 0..80 {
        let x1 = b - g * (b - a);
        let x2 = a + g * (b - a);
        if steep(x1) > steep(x2) {
            b = x2;
        } else {
            a = x1;
        }
    }
    let peak = steep(0.5 * (a + b)).max(steep(best_i as f64 * h));
    if peak > 0.0 {
        1.0 / peak
    } else {
        f64::INFINITY
    }
}

/// Classical solution at time `t` on `m_out` points by tracing characteristics
/// `x = x0 + c0 u0(x0) t` back to their foot `x0`.
pub fn solve_characteristics(
    u0: &impl PeriodicField,
    c0: f64,
    t: f64,
    m_out: usize,
) -> Result<Profile, BurgersError> {
    if m_out < 2 {
        return Err(BurgersError::Grid(m_out));
    }
    if !(t.is_finite() && t >= 0.0) {
        return Err(BurgersError::Time(t));
    }
    let t_star = shock_time(u0, c0);
    let limit = HORIZON_MARGIN * t_star;
    if t >= limit {
        return Err(BurgersError::Horizon {
            t,
            t_star,
            limit,
            margin: HORIZON_MARGIN,
        });
    }
    if t == 0.0 {
        return Ok(Profile::sample(u0, m_out));
    }

    let sweep = (4 * m_out).max(1024);
    let foot = |s: f64| s + c0 * u0.value(s) * t;
    // X is increasing with X(s + 1) = X(s) + 1 before the shock
    let feet: Vec<f64> = (0..=sweep).map(|k| foot(k as f64 / sweep as f64)).collect();
    let base = feet[0];

    let values = (0..m_out)
        .map(|i| {
            let x = i as f64 / m_out as f64;
            let y = base + wrap_unit(x - base);
            let k = feet.partition_point(|&f| f <= y).clamp(1, sweep) - 1;
            let (mut a, mut b) = (k as f64 / sweep as f64, (k + 1) as f64 / sweep as f64);
            let (mut fa, mut fb) = (feet[k] - y, feet[k + 1] - y);
            // Illinois variant of regula falsi
            let mut side = 0;
            for _ in 0..100 {
                if (b - a).abs() <= 1e-15 || fa == 0.0 {
                    break;
                }
                let s = (a * fb - b * fa) / (fb - fa);
                let fs = foot(s) - y;
                if fs == 0.0 {
                    a = s;
                    fa = 0.0;
                    break;
                }
                if (fs < 0.0) == (fa < 0.0) {
                    a = s;
                    fa = fs;
                    if side == -1 {
                        fb *= 0.5;
                    }
                    side = -1;
                } else {
                    b = s;
                    fb = fs;
                    if side == 1 {
                        fa *= 0.5;
                    }
                    side = 1;
                }
            }
            let s = if fa.abs() <= fb.abs() { a } else { b };
            u0.value(s)
        })
        .collect();
    Ok(Profile::new(values))
}

fn godunov_flux(ul: f64, ur: f64, c0: f64) -> f64 {
    let f = |u: f64| 0.5 * c0 * u * u;
    let (fl, fr) = (f(ul), f(ur));
    if ul <= ur {
        let mut m = fl.min(fr);
        if ul <= 0.0 && 0.0 <= ur {
            m = m.min(0.0);
        }
        m
    } else {
        let mut m = fl.max(fr);
        if ur <= 0.0 && 0.0 <= ul {
            m = m.max(0.0);
        }
        m
    }
}

/// First-order Godunov scheme with the exact Riemann flux for `(c0/2) u²`.
/// `u0` holds the initial cell averages.
pub fn solve_godunov(u0: &Profile, c0: f64, t: f64, cfl: f64) -> Result<Profile, BurgersError> {
    if !(cfl > 0.0 && cfl < 1.0) {
        return Err(BurgersError::Cfl(cfl));
    }
    if u0.len() < 2 {
        return Err(BurgersError::Grid(u0.len()));
    }
    if !(t.is_finite() && t >= 0.0) {
        return Err(BurgersError::Time(t));
    }
    let m = u0.len();
    let dx = 1.0 / m as f64;
    let mut u = u0.values.clone();
    let mut fluxes = vec![0.0; m];
    let mut now = 0.0;
    while now < t {
        let speed = u.iter().map(|v| (c0 * v).abs()).fold(0.0, f64::max);
        let mut dt = if speed > 0.0 {
            cfl * dx / speed
        } else {
            t - now
        };
        if now + dt >= t {
            dt = t - now;
        }
        // fluxes[i] sits at the right edge of cell i
        for i in 0..m {
            fluxes[i] = godunov_flux(u[i], u[(i + 1) % m], c0);
        }
        let ratio = dt / dx;
        for i in 0..m {
            u[i] -= ratio * (fluxes[i] - fluxes[(i + m - 1) % m]);
        }
        now += dt;
        if dt == 0.0 {
            break;
        }
    }
    Ok(Profile::new(u))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::trig::TrigPoly;
    use std::f64::consts::TAU;

    /// First time two characteristics from a fine grid cross.
    fn first_crossing(u0: &TrigPoly, c0: f64) -> f64 {
        let n = 20_000;
        let xs: Vec<f64> = (0..n).map(|i| i as f64 / n as f64).collect();
        let crosses = |t: f64| {
            xs.windows(2)
                .any(|w| w[1] + c0 * u0.value(w[1]) * t <= w[0] + c0 * u0.value(w[0]) * t)
        };
        let (mut a, mut b) = (0.0, 1.0);
        for _ in 0..60 {
            let mid = 0.5 * (a + b);
            if crosses(mid) {
                b = mid;
            } else {
                a = mid;
            }
        }
        b
    }

    #[test]
    fn sine_shock_time() {
        let u0 = TrigPoly::sine(0.5, 1);
        let t_star = shock_time(&u0, -2.0);
        assert!((t_star - 1.0 / TAU).abs() < 1e-12);
        assert!((first_crossing(&u0, -2.0) - t_star).abs() < 1e-6);
        assert!((shock_time(&TrigPoly::sine(1.0, 1), -2.0) - t_star / 2.0).abs() < 1e-12);
        assert_eq!(shock_time(&TrigPoly::constant(0.3), -2.0), f64::INFINITY);
    }

    #[test]
    fn characteristics_identity_and_constants() {
        let u0 = TrigPoly::sine(0.5, 1);
        let at_zero = solve_characteristics(&u0, -2.0, 0.0, 64).unwrap();
        assert_eq!(at_zero, Profile::sample(&u0, 64));
        let flat = solve_characteristics(&TrigPoly::constant(0.7), -2.0, 3.0, 32).unwrap();
        assert!(flat.values.iter().all(|v| (*v - 0.7).abs() < 1e-15));
    }

    #[test]
    fn characteristics_refuse_past_horizon() {
        let u0 = TrigPoly::sine(0.5, 1);
        let err = solve_characteristics(&u0, -2.0, 0.96 / TAU, 64).unwrap_err();
        assert!(matches!(err, BurgersError::Horizon { .. }));
        assert!(err.to_string().contains("0.159"));
    }

    #[test]
    fn characteristics_conserve_mass_and_extrema() {
        let mut u0 = TrigPoly::sine(0.5, 1);
        u0.set_cos(2, 0.1);
        u0.constant = 0.2;
        let t = 0.9 * shock_time(&u0, -2.0);
        let u = solve_characteristics(&u0, -2.0, t, 2048).unwrap();
        assert!((u.mean() - 0.2).abs() < 1e-8);
        let init = Profile::sample(&u0, 4096);
        assert!(u.min() >= init.min() - 1e-12 && u.max() <= init.max() + 1e-12);
    }

    #[test]
    fn characteristics_agree_with_godunov() {
        let u0 = TrigPoly::sine(0.5, 1);
        let m = 4096;
        let exact = solve_characteristics(&u0, -2.0, 0.05, m).unwrap();
        let fv = solve_godunov(&Profile::cell_averages(&u0, m), -2.0, 0.05, 0.9).unwrap();
        let l1 = exact.l1_distance(&fv);
        assert!(l1 <= 2e-4, "L1 = {l1}");
    }

    #[test]
    fn godunov_first_order_convergence() {
        let u0 = TrigPoly::sine(0.5, 1);
        let t = 0.1;
        let errors: Vec<f64> = [256, 512, 1024]
            .iter()
            .map(|&m| {
                let exact = solve_characteristics(&u0, -2.0, t, m).unwrap();
                solve_godunov(&Profile::cell_averages(&u0, m), -2.0, t, 0.8)
                    .unwrap()
                    .l1_distance(&exact)
            })
            .collect();
        for w in errors.windows(2) {
            let order = (w[0] / w[1]).log2();
            assert!(
                (0.7..1.5).contains(&order),
                "observed order {order} from {errors:?}"
            );
        }
    }

    #[test]
    fn godunov_preserves_constants_and_mass() {
        let flat = Profile::new(vec![0.4; 50]);
        let out = solve_godunov(&flat, 1.5, 0.7, 0.5).unwrap();
        assert!(out.values.iter().all(|v| (*v - 0.4).abs() < 1e-15));
        let u0 = Profile::cell_averages(&TrigPoly::sine(0.5, 1), 400);
        // runs past the shock as well
        let out = solve_godunov(&u0, -2.0, 0.4, 0.9).unwrap();
        assert!((out.mean() - u0.mean()).abs() < 1e-14);
        assert!(matches!(
            solve_godunov(&u0, -2.0, 0.1, 1.0),
            Err(BurgersError::Cfl(_))
        ));
    }

    #[test]
    fn godunov_rarefaction_matches_similarity_solution() {
        // u_L = -0.5 on [0, 1/2), u_R = 0.5 on [1/2, 1); flux u² (c0 = 2)
        let (ul, ur, c0, t) = (-0.5, 0.5, 2.0, 0.1);
        let exact = |x: f64| {
            let xi = (x - 0.5) / t;
            if xi <= c0 * ul {
                ul
            } else if xi >= c0 * ur {
                ur
            } else {
                xi / c0
            }
        };
        let mut errors = Vec::new();
        for m in [400, 800, 1600] {
            let u0 = Profile::new(
                (0..m)
                    .map(|i| if (i as f64) < m as f64 / 2.0 { ul } else { ur })
                    .collect(),
            );
            let out = solve_godunov(&u0, c0, t, 0.9).unwrap();
            let window: Vec<usize> = (0..m).filter(|&i| (0.3..0.7).contains(&out.x(i))).collect();
            let err = window
                .iter()
                .map(|&i| (out.values[i] - exact(out.x(i))).abs())
                .sum::<f64>()
                / m as f64;
            errors.push(err);
        }
        assert!(errors[2] < errors[0], "{errors:?}");
        assert!(errors[2] < 5e-3, "{errors:?}");
    }

    #[test]
    fn hermite_profile_interpolates() {
        let u0 = TrigPoly::sine(0.5, 1);
        let p = Profile::sample(&u0, 256);
        for x in [0.0, 0.1234, 0.5, 0.999] {
            assert!((p.value(x) - u0.value(x)).abs() < 1e-6);
            assert!((p.derivative(x) - u0.derivative(x)).abs() < 1e-3);
        }
    }
}
