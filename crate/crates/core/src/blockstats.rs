//! Statistics of the perturbation scaling: the test statistic read against
//! Burgers, the relative entropy between local-equilibrium product measures,
//! the exponential block-moment probe and the lattice `θ^N` field.

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::equilibrium::{EquilibriumError, EquilibriumFamily};
use crate::experiment::seed_plan;
use crate::model::Spin;
use crate::trig::{wrap_unit, PeriodicField};

/// Quadrature points for torus integrals of smooth profiles.
const QUADRATURE_POINTS: usize = 4096;
/// Samples per parallel work unit in the Monte Carlo probe.
const CHUNK: usize = 1 << 14;

#[derive(Debug, Error)]
pub enum BlockStatsError {
    #[error(transparent)]
    Equilibrium(#[from] EquilibriumError),
    #[error("site {site}: density {v} not attainable")]
    Density { site: usize, v: f64 },
    #[error("step distribution invalid: {0}")]
    Zeta(String),
    #[error("G violates G(x) <= {c1} min(|x|, x^2/2) at x = {x} (G(x) = {value})")]
    GBound { x: f64, value: f64, c1: f64 },
    #[error("gamma = {gamma} is not below gamma0 = {gamma0}")]
    Gamma { gamma: f64, gamma0: f64 },
    #[error("block length and sample count must be positive")]
    Size,
}

/// `N^{-1+β} Σ_j φ((j - N^{1+β} b0 t)/N mod 1) (z_j - v0)`.
pub fn weighted_fluctuation(
    spins: &[Spin],
    phi: &impl PeriodicField,
    beta: f64,
    v0: f64,
    b0: f64,
    t: f64,
) -> f64 {
    let n = spins.len() as f64;
    let shift = n.powf(1.0 + beta) * b0 * t;
    let sum: f64 = spins
        .iter()
        .enumerate()
        .map(|(j, &z)| phi.value(wrap_unit((j as f64 - shift) / n)) * (z as f64 - v0))
        .sum();
    n.powf(-1.0 + beta) * sum
}

/// `N^{-1+β} Σ_j φ(j/N)(v0 + N^{-β}u0(j/N) - v0)`: the exact mean at `t = 0`.
pub fn initial_fluctuation_mean(
    n: usize,
    phi: &impl PeriodicField,
    u0: &impl PeriodicField,
) -> f64 {
    let nf = n as f64;
    let sum: f64 = (0..n)
        .map(|j| {
            let x = j as f64 / nf;
            phi.value(x) * u0.value(x)
        })
        .sum();
    sum / nf
}

/// `∫ φ u` on the torus by the midpoint rule.
pub fn torus_inner(phi: &impl PeriodicField, u: &impl PeriodicField) -> f64 {
    let m = QUADRATURE_POINTS as f64;
    (0..QUADRATURE_POINTS)
        .map(|i| {
            let x = (i as f64 + 0.5) / m;
            phi.value(x) * u.value(x)
        })
        .sum::<f64>()
        / m
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EntropyComparison {
    /// Lattice sum of one-site relative entropies.
    pub exact: f64,
    /// Leading-order term of the expansion in `N^{-β}`.
    pub expansion: f64,
}

/// Relative entropy of the product measure at profile `u2` with respect to
/// the one at `u1`, exactly and to leading order.
pub fn entropy_between_profiles(
    family: &EquilibriumFamily,
    n: usize,
    beta: f64,
    v0: f64,
    u1: &impl PeriodicField,
    u2: &impl PeriodicField,
) -> Result<EntropyComparison, BlockStatsError> {
    let nf = n as f64;
    let eps = nf.powf(-beta);
    let theta_at = |site: usize, v: f64| {
        family
            .theta_of_v(v)
            .map_err(|_| BlockStatsError::Density { site, v })
    };
    let mut exact = 0.0;
    for j in 0..n {
        let x = j as f64 / nf;
        let (a, b) = (u1.value(x), u2.value(x));
        if a == b {
            continue;
        }
        let theta1 = theta_at(j, v0 + eps * a)?;
        let theta2 = theta_at(j, v0 + eps * b)?;
        exact += family.site_entropy(theta2, theta1)?;
    }

    let theta0 = family.theta_of_v(v0)?;
    let theta0_prime = family.theta_prime(v0)?;
    let f0_second = family.moments(theta0)?.variance;
    let m = QUADRATURE_POINTS as f64;
    let integral: f64 = (0..QUADRATURE_POINTS)
        .map(|i| {
            let x = (i as f64 + 0.5) / m;
            let (a, b) = (u1.value(x), u2.value(x));
            (b - a) * (b - 0.5 * f0_second * theta0_prime * (b + a))
        })
        .sum::<f64>()
        / m;
    let expansion = nf.powf(1.0 - 2.0 * beta) * theta0_prime * integral;
    Ok(EntropyComparison { exact, expansion })
}

/// Law of one step `ζ`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum ZetaSpec {
    /// `±1` with probability 1/2.
    Rademacher,
    /// Finite support with weights (normalized internally).
    Discrete { values: Vec<f64>, weights: Vec<f64> },
}

impl ZetaSpec {
    fn validate(&self) -> Result<(Vec<f64>, Vec<f64>), BlockStatsError> {
        let (values, weights) = match self {
            ZetaSpec::Rademacher => (vec![-1.0, 1.0], vec![0.5, 0.5]),
            ZetaSpec::Discrete { values, weights } => (values.clone(), weights.clone()),
        };
        if values.is_empty() || values.len() != weights.len() {
            return Err(BlockStatsError::Zeta(
                "values and weights must be non-empty and of equal length".into(),
            ));
        }
        if weights.iter().any(|w| !(w.is_finite() && *w >= 0.0))
            || values.iter().any(|v| !v.is_finite())
        {
            return Err(BlockStatsError::Zeta(
                "non-finite value or negative weight".into(),
            ));
        }
        let total: f64 = weights.iter().sum();
        if total <= 0.0 {
            return Err(BlockStatsError::Zeta("weights sum to zero".into()));
        }
        let probs: Vec<f64> = weights.iter().map(|w| w / total).collect();
        let mean: f64 = values.iter().zip(&probs).map(|(v, p)| v * p).sum();
        let scale = values.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        if mean.abs() > 1e-12 * scale.max(1.0) {
            return Err(BlockStatsError::Zeta(format!("mean {mean} is not zero")));
        }
        Ok((values, probs))
    }

    /// `Λ''(0)`: the variance.
    pub fn variance(&self) -> Result<f64, BlockStatsError> {
        let (values, probs) = self.validate()?;
        Ok(values.iter().zip(&probs).map(|(v, p)| v * v * p).sum())
    }
}

/// Penalty function `G`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum GSpec {
    Zero,
    /// `scale · min(|x|, x²/2)`
    QuadraticCap {
        scale: f64,
    },
    /// `scale · x²/2`; breaks the linear-growth bound for large `|x|`.
    Quadratic {
        scale: f64,
    },
}

impl GSpec {
    pub fn value(&self, x: f64) -> f64 {
        match *self {
            GSpec::Zero => 0.0,
            GSpec::QuadraticCap { scale } => scale * x.abs().min(0.5 * x * x),
            GSpec::Quadratic { scale } => scale * 0.5 * x * x,
        }
    }

    pub fn second_derivative_at_zero(&self) -> f64 {
        match *self {
            GSpec::Zero => 0.0,
            GSpec::QuadraticCap { scale } | GSpec::Quadratic { scale } => scale,
        }
    }

    /// Checks `G(x) <= c1 min(|x|, x²/2)` on a grid of `[-reach, reach]`.
    pub fn check_bound(&self, c1: f64, reach: f64) -> Result<(), BlockStatsError> {
        const GRID: usize = 4001;
        for i in 0..GRID {
            let x = -reach + 2.0 * reach * i as f64 / (GRID - 1) as f64;
            let value = self.value(x);
            if value > c1 * x.abs().min(0.5 * x * x) * (1.0 + 1e-12) + 1e-300 {
                return Err(BlockStatsError::GBound { x, value, c1 });
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KurschakSpec {
    pub zeta: ZetaSpec,
    pub g: GSpec,
    /// Constant in the bound on `G`.
    pub c1: f64,
    pub gamma: f64,
    /// Admissible ceiling for `gamma`; defaults to `1 / (Λ''(0) G''(0))`.
    pub gamma0: Option<f64>,
    /// Range of the grid on which the bound on `G` is checked.
    pub check_reach: f64,
}

impl KurschakSpec {
    pub fn rademacher_cap(gamma: f64) -> Self {
        Self {
            zeta: ZetaSpec::Rademacher,
            g: GSpec::QuadraticCap { scale: 1.0 },
            c1: 1.0,
            gamma,
            gamma0: None,
            check_reach: 50.0,
        }
    }

    pub fn gamma0(&self) -> Result<f64, BlockStatsError> {
        if let Some(g) = self.gamma0 {
            return Ok(g);
        }
        let curvature = self.zeta.variance()? * self.g.second_derivative_at_zero();
        Ok(if curvature > 0.0 {
            1.0 / curvature
        } else {
            f64::INFINITY
        })
    }

    /// `(1 - γ Λ''(0) G''(0))^{-1/2}`.
    pub fn limit(&self) -> Result<f64, BlockStatsError> {
        let curvature = self.zeta.variance()? * self.g.second_derivative_at_zero();
        Ok((1.0 - self.gamma * curvature).powf(-0.5))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct KurschakEstimate {
    pub l: usize,
    pub gamma: f64,
    pub estimate: f64,
    pub stderr: f64,
    pub limit: f64,
    pub samples: usize,
}

/// Monte Carlo estimate of `E exp{γ l G(S_l / l)}` with `S_l` a sum of `l`
/// independent steps.
pub fn kurschak_probe(
    spec: &KurschakSpec,
    l: usize,
    samples: usize,
    seed: u64,
) -> Result<KurschakEstimate, BlockStatsError> {
    if l == 0 || samples == 0 {
        return Err(BlockStatsError::Size);
    }
    let (values, probs) = spec.zeta.validate()?;
    let gamma0 = spec.gamma0()?;
    if !(spec.gamma < gamma0) {
        return Err(BlockStatsError::Gamma {
            gamma: spec.gamma,
            gamma0,
        });
    }
    spec.g.check_bound(spec.c1, spec.check_reach)?;
    let limit = spec.limit()?;

    let lf = l as f64;
    let score = |s: f64| (spec.gamma * lf * spec.g.value(s / lf)).exp();
    let weighted = WeightedIndex::new(&probs).map_err(|e| BlockStatsError::Zeta(e.to_string()))?;
    let rademacher = matches!(spec.zeta, ZetaSpec::Rademacher);
    let chunks = samples.div_ceil(CHUNK);
    let (sum, sum_sq) = (0..chunks)
        .into_par_iter()
        .map(|chunk| {
            let mut rng = seed_plan(seed, chunk as u64, l as u64).rng();
            let count = CHUNK.min(samples - chunk * CHUNK);
            let mut acc = (0.0, 0.0);
            for _ in 0..count {
                let s = if rademacher {
                    rademacher_sum(l, &mut rng)
                } else {
                    (0..l).map(|_| values[weighted.sample(&mut rng)]).sum()
                };
                let e = score(s);
                acc.0 += e;
                acc.1 += e * e;
            }
            acc
        })
        .collect::<Vec<_>>()
        .into_iter()
        .fold((0.0, 0.0), |a, b| (a.0 + b.0, a.1 + b.1));
    let nf = samples as f64;
    let mean = sum / nf;
    let var = if samples > 1 {
        ((sum_sq - nf * mean * mean) / (nf - 1.0)).max(0.0)
    } else {
        0.0
    };
    Ok(KurschakEstimate {
        l,
        gamma: spec.gamma,
        estimate: mean,
        stderr: (var / nf).sqrt(),
        limit,
        samples,
    })
}

/// Sum of `l` Rademacher steps from the popcount of `l` random bits.
fn rademacher_sum<R: Rng + ?Sized>(l: usize, rng: &mut R) -> f64 {
    let mut ones = 0u32;
    let mut left = l;
    while left >= 64 {
        ones += rng.random::<u64>().count_ones();
        left -= 64;
    }
    if left > 0 {
        ones += (rng.random::<u64>() & ((1u64 << left) - 1)).count_ones();
    }
    2.0 * ones as f64 - l as f64
}

/// Lattice fields `θ^N(t, j/N)`, `θ^N_x` and the time derivative implied by
/// Burgers' equation.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ThetaProfile {
    pub n: usize,
    pub beta: f64,
    pub v0: f64,
    pub t: f64,
    pub theta: Vec<f64>,
    pub theta_x: Vec<f64>,
    /// `-θ^N_x (c0 u + N^β b0)`.
    pub theta_t: Vec<f64>,
    /// `max_j |θ(v0 + N^{-β}u) - θ0 - N^{-β}θ^N|`.
    pub consistency: f64,
}

/// Builds the `θ^N` field from the Burgers solution `u` at time `t`, given in
/// the co-moving frame.
pub fn theta_profile(
    family: &EquilibriumFamily,
    u: &impl PeriodicField,
    n: usize,
    beta: f64,
    v0: f64,
    b0: f64,
    c0: f64,
    t: f64,
) -> Result<ThetaProfile, BlockStatsError> {
    let nf = n as f64;
    let amp = nf.powf(beta);
    let theta0 = family.theta_of_v(v0)?;
    let mut out = ThetaProfile {
        n,
        beta,
        v0,
        t,
        theta: Vec::with_capacity(n),
        theta_x: Vec::with_capacity(n),
        theta_t: Vec::with_capacity(n),
        consistency: 0.0,
    };
    for j in 0..n {
        let y = wrap_unit(j as f64 / nf - amp * b0 * t);
        let (uy, ux) = (u.value(y), u.derivative(y));
        let v = v0 + uy / amp;
        let th = family
            .theta_of_v(v)
            .map_err(|_| BlockStatsError::Density { site: j, v })?;
        let theta = amp * (th - theta0);
        let theta_x = family.theta_prime(v)? * ux;
        out.consistency = out.consistency.max((th - theta0 - theta / amp).abs());
        out.theta.push(theta);
        out.theta_x.push(theta_x);
        out.theta_t.push(-theta_x * (c0 * uy + amp * b0));
    }
    Ok(out)
}
