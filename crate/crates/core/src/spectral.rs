//! Exact linear algebra on canonical block sectors.
//!
//! A sector holds every block configuration of length `l` with total spin `k`.
//! The block generator moves one unit `i -> i+1` at rate `c(z_i, z_{i+1})`
//! with free boundaries; its reversal moves `i -> i-1` at rate `c(z_i, z_{i-1})`.
//! Their average is reversible for the canonical weights, and conjugating by
//! `diag(√π)` turns it into a symmetric matrix.

use std::collections::{HashMap, VecDeque};

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::equilibrium::{log_sum_exp, EquilibriumError, EquilibriumFamily};
use crate::experiment::seed_plan;
use crate::model::{derive_r, ModelError, RateModel, Spin};

/// Longest block accepted by the enumerator.
pub const MAX_BLOCK: usize = 10;
/// Largest sector handled by the dense eigensolver.
pub const MAX_SECTOR_STATES: usize = 6000;
/// Half-width of the default clipping window around `k/l` for unbounded spins.
const DEFAULT_CLIP: Spin = 4;

#[derive(Debug, Error)]
pub enum SpectralError {
    #[error("block length {0} outside 1..={MAX_BLOCK}")]
    BlockLength(usize),
    #[error("sector k = {k} is empty for l = {l} with spins in [{lo}, {hi}]")]
    EmptySector {
        l: usize,
        k: i64,
        lo: Spin,
        hi: Spin,
    },
    #[error("sector has {0} states, above the limit {MAX_SECTOR_STATES}")]
    TooLarge(usize),
    #[error("vector has length {got}, sector has {expected} states")]
    Dimension { expected: usize, got: usize },
    #[error(
        "sector is reducible under the symmetrized moves ({reached} of {total} states reachable)"
    )]
    Reducible { reached: usize, total: usize },
    #[error("epsilon = {eps} outside the admissible range (0, {bound})")]
    Epsilon { eps: f64, bound: f64 },
    #[error("cylinder base {base} exceeds block length {l}")]
    CylinderBase { base: usize, l: usize },
    #[error("cylinder table has {got} entries, expected {expected}")]
    CylinderTable { expected: usize, got: usize },
    #[error("need at least two block lengths with nonzero error to fit a slope")]
    Fit,
    #[error("ring size {n} and block {l} must satisfy 1 <= l <= n <= 8")]
    SmallRing { n: usize, l: usize },
    #[error(transparent)]
    Equilibrium(#[from] EquilibriumError),
    #[error(transparent)]
    Model(#[from] ModelError),
}

/// Canonical ensemble on one sector.
#[derive(Debug, Clone)]
pub struct BlockEnsemble {
    model: RateModel,
    pub l: usize,
    pub k: i64,
    /// Per-site spin window.
    pub clip: (Spin, Spin),
    /// Lexicographically ordered states.
    pub states: Vec<Vec<Spin>>,
    index: HashMap<Vec<Spin>, usize>,
    /// Canonical weights, summing to 1.
    pub pi: Vec<f64>,
    /// Mass of the sector under the product of one-site laws.
    pub mass: f64,
}

/// One-site log-weights of `π` on `[lo, hi]`, normalized over that window.
fn site_log_weights(family: &EquilibriumFamily, lo: Spin, hi: Spin) -> Vec<f64> {
    let raw: Vec<f64> = (lo..=hi).map(|z| family.log_pi(z)).collect();
    let norm = log_sum_exp(raw.iter().copied());
    raw.into_iter().map(|w| w - norm).collect()
}

/// Per-site window for sector `(l, k)`; unbounded sides are clipped around `k/l`.
pub fn default_clip(model: &RateModel, l: usize, k: i64) -> (Spin, Spin) {
    let bounds = model.bounds();
    let lo = bounds
        .z_min
        .unwrap_or(k.div_euclid(l as i64) - DEFAULT_CLIP);
    let hi = bounds
        .z_max
        .unwrap_or((k + l as i64 - 1).div_euclid(l as i64) + DEFAULT_CLIP);
    (lo, hi)
}

/// Lists `Ω^l_k` in lexicographic order with canonical weights.
pub fn enumerate_sector(
    family: &EquilibriumFamily,
    l: usize,
    k: i64,
    clip: Option<(Spin, Spin)>,
) -> Result<BlockEnsemble, SpectralError> {
    if l == 0 || l > MAX_BLOCK {
        return Err(SpectralError::BlockLength(l));
    }
    let model = family.model();
    let (mut lo, mut hi) = clip.unwrap_or_else(|| default_clip(model, l, k));
    let bounds = model.bounds();
    lo = lo.max(bounds.z_min.unwrap_or(lo));
    hi = hi.min(bounds.z_max.unwrap_or(hi));
    let li = l as i64;
    if lo > hi || k < li * lo || k > li * hi {
        return Err(SpectralError::EmptySector { l, k, lo, hi });
    }
    let site = site_log_weights(family, lo, hi);

    let mut states = Vec::new();
    let mut current = Vec::with_capacity(l);
    fn walk(
        current: &mut Vec<Spin>,
        left: i64,
        l: usize,
        lo: Spin,
        hi: Spin,
        out: &mut Vec<Vec<Spin>>,
    ) -> bool {
        let remaining = (l - current.len()) as i64;
        if remaining == 0 {
            if left == 0 {
                out.push(current.clone());
            }
            return out.len() <= MAX_SECTOR_STATES;
        }
        for z in lo..=hi {
            let rest = left - z;
            let slots = remaining - 1;
            if rest < slots * lo || rest > slots * hi {
                continue;
            }
            current.push(z);
            let ok = walk(current, rest, l, lo, hi, out);
            current.pop();
            if !ok {
                return false;
            }
        }
        true
    }
    if !walk(&mut current, k, l, lo, hi, &mut states) {
        return Err(SpectralError::TooLarge(states.len()));
    }

    let log_w: Vec<f64> = states
        .iter()
        .map(|s| s.iter().map(|&z| site[(z - lo) as usize]).sum())
        .collect();
    let log_mass = log_sum_exp(log_w.iter().copied());
    let pi = log_w.iter().map(|w| (w - log_mass).exp()).collect();
    let index = states
        .iter()
        .enumerate()
        .map(|(i, s)| (s.clone(), i))
        .collect();
    Ok(BlockEnsemble {
        model: model.clone(),
        l,
        k,
        clip: (lo, hi),
        states,
        index,
        pi,
        mass: log_mass.exp(),
    })
}

impl BlockEnsemble {
    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn model(&self) -> &RateModel {
        &self.model
    }

    /// Moves leaving `state`: `(target, rate)`; `reversed` selects right-to-left moves.
    fn moves(&self, state: usize, reversed: bool) -> Vec<(usize, f64)> {
        let z = &self.states[state];
        let mut out = Vec::new();
        for i in 0..self.l.saturating_sub(1) {
            let (from, to) = if reversed { (i + 1, i) } else { (i, i + 1) };
            let rate = self.model.rate(z[from], z[to]);
            if rate <= 0.0 {
                continue;
            }
            let mut next = z.clone();
            next[from] -= 1;
            next[to] += 1;
            if let Some(&j) = self.index.get(&next) {
                out.push((j, rate));
            }
        }
        out
    }

    fn check_len(&self, f: &[f64]) -> Result<(), SpectralError> {
        if f.len() != self.len() {
            return Err(SpectralError::Dimension {
                expected: self.len(),
                got: f.len(),
            });
        }
        Ok(())
    }

    /// `∫ f dπ^l_k`
    pub fn expectation(&self, f: &[f64]) -> f64 {
        self.pi.iter().zip(f).map(|(p, v)| p * v).sum()
    }

    pub fn variance(&self, f: &[f64]) -> f64 {
        let mean = self.expectation(f);
        self.pi
            .iter()
            .zip(f)
            .map(|(p, v)| p * (v - mean) * (v - mean))
            .sum()
    }

    pub fn operator(&self) -> BlockOperator {
        BlockOperator::new(self)
    }
}

/// Dense matrices of the block dynamics on one sector.
#[derive(Debug, Clone)]
pub struct BlockOperator {
    pub generator: DMatrix<f64>,
    pub reversed: DMatrix<f64>,
    /// `(L + L*) / 2`
    pub sym: DMatrix<f64>,
    /// `diag(√π) Sym diag(√π)^{-1}`, symmetric.
    pub symmetrized: DMatrix<f64>,
    sqrt_pi: DVector<f64>,
}

impl BlockOperator {
    pub fn new(ensemble: &BlockEnsemble) -> Self {
        let n = ensemble.len();
        let build = |reversed: bool| {
            let mut m = DMatrix::zeros(n, n);
            for s in 0..n {
                for (t, rate) in ensemble.moves(s, reversed) {
                    m[(s, t)] += rate;
                    m[(s, s)] -= rate;
                }
            }
            m
        };
        let generator = build(false);
        let reversed = build(true);
        let sym = (&generator + &reversed) * 0.5;
        let sqrt_pi = DVector::from_iterator(n, ensemble.pi.iter().map(|p| p.sqrt()));
        let mut symmetrized = DMatrix::zeros(n, n);
        for i in 0..n {
            for j in 0..n {
                symmetrized[(i, j)] = sqrt_pi[i] * sym[(i, j)] / sqrt_pi[j];
            }
        }
        let symmetrized = (&symmetrized + symmetrized.transpose()) * 0.5;
        Self {
            generator,
            reversed,
            sym,
            symmetrized,
            sqrt_pi,
        }
    }

    /// `max_j |Σ_i π_i M_ij|` for `M` the block generator.
    pub fn stationarity_residual(&self) -> f64 {
        Self::left_residual(&self.generator, &self.sqrt_pi)
    }

    /// Same residual for the reversible average.
    pub fn sym_stationarity_residual(&self) -> f64 {
        Self::left_residual(&self.sym, &self.sqrt_pi)
    }

    fn left_residual(m: &DMatrix<f64>, sqrt_pi: &DVector<f64>) -> f64 {
        let pi = sqrt_pi.component_mul(sqrt_pi);
        (m.transpose() * pi).amax()
    }

    pub fn row_sum_residual(&self) -> f64 {
        self.generator.column_sum().amax()
    }

    /// `|⟨f, L g⟩_π - ⟨L* f, g⟩_π|` after removing the diagonal terms; off the
    /// diagonal `L*` is the π-adjoint of `L`, on it the exit rates differ.
    pub fn adjointness_residual(&self, f: &[f64], g: &[f64]) -> f64 {
        let pi = self.sqrt_pi.component_mul(&self.sqrt_pi);
        let (f, g) = (DVector::from_column_slice(f), DVector::from_column_slice(g));
        let lhs = f.component_mul(&pi).dot(&(&self.generator * &g));
        let rhs = (&self.reversed * &f).component_mul(&pi).dot(&g);
        let diagonal: f64 = (0..f.len())
            .map(|z| pi[z] * f[z] * g[z] * (self.reversed[(z, z)] - self.generator[(z, z)]))
            .sum();
        (lhs - rhs + diagonal).abs()
    }

    /// Breadth-first scan of the moves of `Sym`.
    fn reachable(&self) -> usize {
        let n = self.sym.nrows();
        let mut seen = vec![false; n];
        let mut queue = VecDeque::from([0usize]);
        seen[0] = true;
        let mut count = 1;
        while let Some(i) = queue.pop_front() {
            for j in 0..n {
                if !seen[j] && self.sym[(i, j)] > 0.0 {
                    seen[j] = true;
                    count += 1;
                    queue.push_back(j);
                }
            }
        }
        count
    }
}

/// `½ Σ_i ∫ c(z_i, z_{i+1}) (f(Θ_i z) - f(z))² dπ^l_k`, or the right-to-left
/// variant when `reversed`.
pub fn dirichlet_form(
    ensemble: &BlockEnsemble,
    f: &[f64],
    reversed: bool,
) -> Result<f64, SpectralError> {
    ensemble.check_len(f)?;
    let mut total = 0.0;
    for s in 0..ensemble.len() {
        for (t, rate) in ensemble.moves(s, reversed) {
            let d = f[t] - f[s];
            total += ensemble.pi[s] * rate * d * d;
        }
    }
    Ok(0.5 * total)
}

/// The block Dirichlet form `D^l_k(f)`.
pub fn dirichlet(ensemble: &BlockEnsemble, f: &[f64]) -> Result<f64, SpectralError> {
    dirichlet_form(ensemble, f, false)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SpectralGap {
    /// Smallest nonzero eigenvalue of `-Sym`; `+inf` without bonds.
    pub gap: f64,
    /// `D(f) / Var(f)` at the computed eigenfunction.
    pub rayleigh: f64,
    pub eigenfunction: Vec<f64>,
}

fn symmetric_eigen(m: &DMatrix<f64>) -> (Vec<f64>, DMatrix<f64>) {
    let eig = SymmetricEigen::new(m.clone());
    (eig.eigenvalues.iter().copied().collect(), eig.eigenvectors)
}

/// Spectral gap of the reversible block dynamics on the sector.
pub fn spectral_gap(ensemble: &BlockEnsemble) -> Result<SpectralGap, SpectralError> {
    if ensemble.len() == 1 || ensemble.l == 1 {
        return Ok(SpectralGap {
            gap: f64::INFINITY,
            rayleigh: f64::INFINITY,
            eigenfunction: vec![0.0; ensemble.len()],
        });
    }
    let op = ensemble.operator();
    let reached = op.reachable();
    if reached < ensemble.len() {
        return Err(SpectralError::Reducible {
            reached,
            total: ensemble.len(),
        });
    }
    let (values, vectors) = symmetric_eigen(&(-&op.symmetrized));
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let second = order[1];
    let eigenfunction: Vec<f64> = (0..ensemble.len())
        .map(|i| vectors[(i, second)] / op.sqrt_pi[i])
        .collect();
    let rayleigh = dirichlet(ensemble, &eigenfunction)? / ensemble.variance(&eigenfunction);
    Ok(SpectralGap {
        gap: values[second],
        rayleigh,
        eigenfunction,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SigmaBar {
    /// Top eigenvalue of `Sym + diag(V)`.
    pub value: f64,
    /// `∫ V h dπ - D(√h)` at the density induced by the top eigenvector.
    pub variational: f64,
}

/// `sup spec((L + L*)/2 + V)` on the sector.
pub fn sigma_bar(ensemble: &BlockEnsemble, potential: &[f64]) -> Result<SigmaBar, SpectralError> {
    ensemble.check_len(potential)?;
    let op = ensemble.operator();
    let mut m = op.symmetrized.clone();
    for (i, v) in potential.iter().enumerate() {
        m[(i, i)] += v;
    }
    let (values, vectors) = symmetric_eigen(&m);
    let top = (0..values.len())
        .max_by(|&a, &b| values[a].total_cmp(&values[b]))
        .unwrap_or(0);
    let psi: Vec<f64> = (0..ensemble.len()).map(|i| vectors[(i, top)]).collect();
    let norm: f64 = psi.iter().map(|p| p * p).sum();
    // h = ψ² / π, so √h = |ψ| / √π
    let root_h: Vec<f64> = psi
        .iter()
        .enumerate()
        .map(|(i, p)| p.abs() / (norm.sqrt() * op.sqrt_pi[i]))
        .collect();
    let h: Vec<f64> = root_h.iter().map(|r| r * r).collect();
    let gain: f64 = ensemble
        .pi
        .iter()
        .zip(&h)
        .zip(potential)
        .map(|((p, h), v)| p * h * v)
        .sum();
    let variational = gain - dirichlet(ensemble, &root_h)?;
    Ok(SigmaBar {
        value: values[top],
        variational,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GapPerturbation {
    pub lhs: f64,
    pub rhs: f64,
    /// `(2 ‖V‖_∞ ρ)^{-1}`
    pub eps_bound: f64,
    /// `|∫ V dπ|` removed before the comparison.
    pub projected_mean: f64,
}

impl GapPerturbation {
    pub fn holds(&self) -> bool {
        self.lhs <= self.rhs + 1e-10
    }
}

/// Compares `σ̄(Sym + εV)` with `ε²ρ Var(V) / (1 - 2‖V‖_∞ ερ)`, `ρ = 1/gap`.
pub fn check_gap_perturbation(
    ensemble: &BlockEnsemble,
    potential: &[f64],
    eps: f64,
) -> Result<GapPerturbation, SpectralError> {
    ensemble.check_len(potential)?;
    let mean = ensemble.expectation(potential);
    let centered: Vec<f64> = potential.iter().map(|v| v - mean).collect();
    let sup = centered.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let rho = 1.0 / spectral_gap(ensemble)?.gap;
    let eps_bound = if sup * rho > 0.0 {
        1.0 / (2.0 * sup * rho)
    } else {
        f64::INFINITY
    };
    if !(eps > 0.0 && eps < eps_bound) {
        return Err(SpectralError::Epsilon {
            eps,
            bound: eps_bound,
        });
    }
    let scaled: Vec<f64> = centered.iter().map(|v| eps * v).collect();
    let lhs = sigma_bar(ensemble, &scaled)?.value;
    let var = ensemble.variance(&centered);
    let rhs = eps * eps * rho / (1.0 - 2.0 * sup * eps * rho) * var;
    Ok(GapPerturbation {
        lhs,
        rhs,
        eps_bound,
        projected_mean: mean.abs(),
    })
}

/// Local function whose block average is taken.
#[derive(Debug, Clone, PartialEq)]
pub enum Cylinder {
    /// `z_0`
    Spin,
    /// `c(z_0, z_1)`
    Flux,
    /// Arbitrary function of `base` consecutive spins in the clipping window,
    /// tabulated lexicographically.
    Table {
        base: usize,
        lo: Spin,
        hi: Spin,
        values: Vec<f64>,
    },
}

impl Cylinder {
    pub fn base(&self) -> usize {
        match self {
            Cylinder::Spin => 1,
            Cylinder::Flux => 2,
            Cylinder::Table { base, .. } => *base,
        }
    }

    pub fn label(&self) -> &'static str {
        match self {
            Cylinder::Spin => "z",
            Cylinder::Flux => "flux",
            Cylinder::Table { .. } => "table",
        }
    }

    fn validate(&self) -> Result<(), SpectralError> {
        if let Cylinder::Table {
            base,
            lo,
            hi,
            values,
        } = self
        {
            let width = (hi - lo + 1).max(0) as usize;
            let expected = width.pow(*base as u32);
            if values.len() != expected {
                return Err(SpectralError::CylinderTable {
                    expected,
                    got: values.len(),
                });
            }
        }
        Ok(())
    }

    pub fn eval(&self, model: &RateModel, z: &[Spin]) -> f64 {
        match self {
            Cylinder::Spin => z[0] as f64,
            Cylinder::Flux => model.rate(z[0], z[1]),
            Cylinder::Table {
                base,
                lo,
                hi,
                values,
            } => {
                let width = hi - lo + 1;
                let mut idx = 0i64;
                for &s in &z[..*base] {
                    if s < *lo || s > *hi {
                        return 0.0;
                    }
                    idx = idx * width + (s - lo);
                }
                values[idx as usize]
            }
        }
    }

    /// Grand-canonical expectation at density `v`.
    pub fn grand_canonical(
        &self,
        family: &EquilibriumFamily,
        v: f64,
    ) -> Result<f64, SpectralError> {
        match self {
            Cylinder::Spin => Ok(v),
            Cylinder::Flux => Ok(family.flux_hat(v)?),
            Cylinder::Table {
                base,
                lo,
                hi,
                values,
            } => {
                let theta = family.theta_of_v(v)?;
                let pmf = family.pmf(theta)?;
                let wlo = family.window().0;
                let p = |s: Spin| {
                    let i = s - wlo;
                    if i >= 0 && (i as usize) < pmf.len() {
                        pmf[i as usize]
                    } else {
                        0.0
                    }
                };
                let width = (hi - lo + 1) as usize;
                let mut total = 0.0;
                for (idx, value) in values.iter().enumerate() {
                    let mut rest = idx;
                    let mut weight = 1.0;
                    for _ in 0..*base {
                        weight *= p(lo + (rest % width) as Spin);
                        rest /= width;
                    }
                    total += weight * value;
                }
                Ok(total)
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CanonicalMoments {
    pub mean: f64,
    pub variance: f64,
}

/// Block average over the `l - m + 1` translates that fit inside the block.
fn block_average(ensemble: &BlockEnsemble, psi: &Cylinder, z: &[Spin]) -> f64 {
    let m = psi.base();
    let count = ensemble.l - m + 1;
    (0..count)
        .map(|i| psi.eval(&ensemble.model, &z[i..]))
        .sum::<f64>()
        / count as f64
}

/// `E^l_k(Ψ^l)` and `Var^l_k(Ψ^l)` by exact sector sums.
pub fn canonical_expectation(
    ensemble: &BlockEnsemble,
    psi: &Cylinder,
) -> Result<CanonicalMoments, SpectralError> {
    psi.validate()?;
    if psi.base() > ensemble.l {
        return Err(SpectralError::CylinderBase {
            base: psi.base(),
            l: ensemble.l,
        });
    }
    let values: Vec<f64> = ensemble
        .states
        .iter()
        .map(|z| block_average(ensemble, psi, z))
        .collect();
    Ok(CanonicalMoments {
        mean: ensemble.expectation(&values),
        variance: ensemble.variance(&values),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EnsemblePoint {
    pub l: usize,
    pub k: i64,
    pub density: f64,
    pub canonical: f64,
    pub grand_canonical: f64,
    pub abs_error: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EnsembleSweep {
    pub points: Vec<EnsemblePoint>,
    /// Least-squares slope of `log abs_error` against `log l`.
    pub fitted_slope: f64,
}

/// Canonical against grand-canonical expectations of `Ψ` at a fixed density.
pub fn equivalence_sweep(
    family: &EquilibriumFamily,
    psi: &Cylinder,
    density: f64,
    lengths: &[usize],
) -> Result<EnsembleSweep, SpectralError> {
    let mut points = Vec::with_capacity(lengths.len());
    for &l in lengths {
        let k = (density * l as f64).round() as i64;
        let ensemble = enumerate_sector(family, l, k, None)?;
        let canonical = canonical_expectation(&ensemble, psi)?.mean;
        let v = k as f64 / l as f64;
        let grand_canonical = psi.grand_canonical(family, v)?;
        points.push(EnsemblePoint {
            l,
            k,
            density: v,
            canonical,
            grand_canonical,
            abs_error: (canonical - grand_canonical).abs(),
        });
    }
    let fit: Vec<(f64, f64)> = points
        .iter()
        .filter(|p| p.abs_error > 0.0)
        .map(|p| ((p.l as f64).ln(), p.abs_error.ln()))
        .collect();
    let fitted_slope = log_log_slope(&fit).ok_or(SpectralError::Fit)?;
    Ok(EnsembleSweep {
        points,
        fitted_slope,
    })
}

/// Least-squares slope through `(x, y)` pairs.
pub fn log_log_slope(points: &[(f64, f64)]) -> Option<f64> {
    if points.len() < 2 {
        return None;
    }
    let n = points.len() as f64;
    let mx = points.iter().map(|p| p.0).sum::<f64>() / n;
    let my = points.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = points.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = points.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    (sxx > 0.0).then(|| sxy / sxx)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GapRow {
    pub model: String,
    pub l: usize,
    pub k: i64,
    pub sector_size: usize,
    pub gap: f64,
    pub gap_times_l2: f64,
    /// `max |π L|` for the block generator.
    pub stationarity: f64,
    /// `max |π Sym|`.
    pub sym_stationarity: f64,
    pub rayleigh: f64,
}

/// Gaps of every sector for each block length, computed in parallel.
pub fn gap_sweep(
    family: &EquilibriumFamily,
    lengths: &[usize],
    clip: Option<(Spin, Spin)>,
) -> Result<Vec<GapRow>, SpectralError> {
    let model = family.model();
    let mut cells = Vec::new();
    for &l in lengths {
        let (lo, hi) = match clip {
            Some(c) => c,
            None => {
                let b = model.bounds();
                (
                    b.z_min.unwrap_or(0),
                    b.z_max.unwrap_or(b.z_min.unwrap_or(0) + 2 * DEFAULT_CLIP),
                )
            }
        };
        for k in (l as i64 * lo)..=(l as i64 * hi) {
            cells.push((l, k, (lo, hi)));
        }
    }
    cells
        .into_par_iter()
        .map(|(l, k, window)| {
            let ensemble = enumerate_sector(family, l, k, Some(window))?;
            let op = ensemble.operator();
            let gap = spectral_gap(&ensemble)?;
            Ok(GapRow {
                model: model.name().to_string(),
                l,
                k,
                sector_size: ensemble.len(),
                gap: gap.gap,
                gap_times_l2: gap.gap * (l * l) as f64,
                stationarity: op.stationarity_residual(),
                sym_stationarity: op.sym_stationarity_residual(),
                rayleigh: gap.rayleigh,
            })
        })
        .collect()
}

/// `min_x min_y c(x, y) / r(x)` over the window, skipping blocked pairs.
pub fn nondegeneracy_ratio(model: &RateModel, window: (Spin, Spin)) -> Result<f64, SpectralError> {
    let (lo, hi) = window;
    let derived = derive_r(model, (hi - lo).abs().max(hi.abs()).max(lo.abs()) + 1)?;
    let bounds = model.bounds();
    let mut best = f64::INFINITY;
    for x in lo..=hi {
        if bounds.z_min == Some(x) {
            continue;
        }
        let r = model
            .native_r(x)
            .or_else(|| derived.get(x))
            .unwrap_or(f64::NAN);
        if !(r.is_finite() && r > 0.0) {
            continue;
        }
        for y in lo..=hi {
            if bounds.z_max == Some(y) {
                continue;
            }
            best = best.min(model.rate(x, y) / r);
        }
    }
    Ok(best)
}

/// Exhaustive checks of the sector decomposition and the block-convexity
/// inequality of the Dirichlet forms.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SectorDecompositionReport {
    pub n: usize,
    pub l: usize,
    pub trials: usize,
    /// Largest `|D^l(√h^l) - Σ_k w_k D^l_k(√h^l_k)|`.
    pub max_identity_violation: f64,
    /// Trials with `D^N(√h) < (1/l) Σ_j D^l(√h^{N,l,j})`.
    pub convex_violations: usize,
    /// Smallest `D^N - (1/l) Σ_j D^l` seen.
    pub min_convex_margin: f64,
}

/// All configurations of `sites` spins in `[lo, hi]`, lexicographic.
fn product_states(sites: usize, lo: Spin, hi: Spin) -> Vec<Vec<Spin>> {
    let width = (hi - lo + 1) as usize;
    let total = width.pow(sites as u32);
    (0..total)
        .map(|mut idx| {
            let mut z = vec![0; sites];
            for slot in (0..sites).rev() {
                z[slot] = lo + (idx % width) as Spin;
                idx /= width;
            }
            z
        })
        .collect()
}

/// `½ Σ_bonds ∫ c(z_i, z_{i+1}) (f(Θ_i z) - f(z))² dp` on a product space.
fn product_dirichlet(
    model: &RateModel,
    states: &[Vec<Spin>],
    index: &HashMap<Vec<Spin>, usize>,
    p: &[f64],
    f: &[f64],
    periodic: bool,
) -> f64 {
    let mut total = 0.0;
    for (s, z) in states.iter().enumerate() {
        let n = z.len();
        let bonds = if periodic { n } else { n.saturating_sub(1) };
        for i in 0..bonds {
            let j = (i + 1) % n;
            let rate = model.rate(z[i], z[j]);
            if rate <= 0.0 {
                continue;
            }
            let mut next = z.clone();
            next[i] -= 1;
            next[j] += 1;
            if let Some(&t) = index.get(&next) {
                let d = f[t] - f[s];
                total += p[s] * rate * d * d;
            }
        }
    }
    0.5 * total
}

/// Random densities on the ring of `n` sites, checking the sector identity for
/// every block marginal and the block-convexity inequality.
pub fn check_sector_decomposition(
    family: &EquilibriumFamily,
    n: usize,
    l: usize,
    trials: usize,
    seed: u64,
) -> Result<SectorDecompositionReport, SpectralError> {
    if !(1..=8).contains(&n) || l == 0 || l > n {
        return Err(SpectralError::SmallRing { n, l });
    }
    let model = family.model();
    let (lo, hi) = {
        let b = model.bounds();
        let lo = b.z_min.unwrap_or(0);
        (lo, b.z_max.unwrap_or(lo + 2))
    };
    let site = site_log_weights(family, lo, hi);
    let ring = product_states(n, lo, hi);
    let ring_index: HashMap<Vec<Spin>, usize> = ring
        .iter()
        .enumerate()
        .map(|(i, s)| (s.clone(), i))
        .collect();
    let ring_pi: Vec<f64> = ring
        .iter()
        .map(|z| {
            z.iter()
                .map(|&s| site[(s - lo) as usize])
                .sum::<f64>()
                .exp()
        })
        .collect();
    let block = product_states(l, lo, hi);
    let block_index: HashMap<Vec<Spin>, usize> = block
        .iter()
        .enumerate()
        .map(|(i, s)| (s.clone(), i))
        .collect();
    let block_pi: Vec<f64> = block
        .iter()
        .map(|z| {
            z.iter()
                .map(|&s| site[(s - lo) as usize])
                .sum::<f64>()
                .exp()
        })
        .collect();

    let mut sectors: HashMap<i64, BlockEnsemble> = HashMap::new();
    for k in (l as i64 * lo)..=(l as i64 * hi) {
        sectors.insert(k, enumerate_sector(family, l, k, Some((lo, hi)))?);
    }

    let mut rng = seed_plan(seed, 0, (n * 16 + l) as u64).rng();
    let mut report = SectorDecompositionReport {
        n,
        l,
        trials,
        max_identity_violation: 0.0,
        convex_violations: 0,
        min_convex_margin: f64::INFINITY,
    };
    for _ in 0..trials {
        let raw: Vec<f64> = ring.iter().map(|_| rng.random::<f64>() + 0.05).collect();
        let norm: f64 = raw.iter().zip(&ring_pi).map(|(h, p)| h * p).sum();
        let h: Vec<f64> = raw.iter().map(|v| v / norm).collect();
        let root: Vec<f64> = h.iter().map(|v| v.sqrt()).collect();
        let d_ring = product_dirichlet(model, &ring, &ring_index, &ring_pi, &root, true);

        let mut block_sum = 0.0;
        for j in 0..n {
            // density of the marginal on sites j..j+l-1 against the block product law
            let mut marginal = vec![0.0; block.len()];
            for (s, z) in ring.iter().enumerate() {
                let key: Vec<Spin> = (0..l).map(|i| z[(j + i) % n]).collect();
                marginal[block_index[&key]] += h[s] * ring_pi[s];
            }
            let hl: Vec<f64> = marginal.iter().zip(&block_pi).map(|(m, p)| m / p).collect();
            let root_l: Vec<f64> = hl.iter().map(|v| v.sqrt()).collect();
            let d_block = product_dirichlet(model, &block, &block_index, &block_pi, &root_l, false);
            block_sum += d_block;

            let mut decomposed = 0.0;
            for ensemble in sectors.values() {
                let values: Vec<f64> = ensemble.states.iter().map(|z| hl[block_index[z]]).collect();
                let w = ensemble.mass * ensemble.expectation(&values);
                if w <= 0.0 {
                    continue;
                }
                let scale = ensemble.expectation(&values);
                let root_k: Vec<f64> = values.iter().map(|v| (v / scale).sqrt()).collect();
                decomposed += w * dirichlet(ensemble, &root_k)?;
            }
            report.max_identity_violation = report
                .max_identity_violation
                .max((d_block - decomposed).abs());
        }
        let margin = d_ring - block_sum / l as f64;
        report.min_convex_margin = report.min_convex_margin.min(margin);
        if margin < 0.0 {
            report.convex_violations += 1;
        }
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::equilibrium::DEFAULT_EPS_TAIL;
    use crate::model::{catalog, Catalog};
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn family(entry: Catalog) -> EquilibriumFamily {
        EquilibriumFamily::build(&catalog(&entry).unwrap(), DEFAULT_EPS_TAIL).unwrap()
    }

    fn tasep() -> EquilibriumFamily {
        family(Catalog::Tasep)
    }

    fn kex2() -> EquilibriumFamily {
        family(Catalog::KExclusion { k: 2, alpha: None })
    }

    #[test]
    fn two_site_tasep_sector() {
        let e = enumerate_sector(&tasep(), 2, 1, None).unwrap();
        assert_eq!(e.states, vec![vec![0, 1], vec![1, 0]]);
        assert_relative_eq!(e.pi[0], 0.5, epsilon = 1e-15);
        assert_relative_eq!(e.mass, 0.5, epsilon = 1e-15);
    }

    #[test]
    fn single_site_sector_is_a_point_mass() {
        let e = enumerate_sector(&kex2(), 1, 2, None).unwrap();
        assert_eq!(e.states, vec![vec![2]]);
        assert_eq!(e.pi, vec![1.0]);
        assert_eq!(spectral_gap(&e).unwrap().gap, f64::INFINITY);
    }

    #[test]
    fn overfull_sector_is_empty() {
        assert!(matches!(
            enumerate_sector(&tasep(), 3, 5, None),
            Err(SpectralError::EmptySector { .. })
        ));
        assert!(matches!(
            enumerate_sector(&tasep(), 11, 5, None),
            Err(SpectralError::BlockLength(11))
        ));
    }

    #[test]
    fn sector_masses_sum_to_one() {
        let f = kex2();
        let total: f64 = (0..=8)
            .map(|k| enumerate_sector(&f, 4, k, None).unwrap().mass)
            .sum();
        assert_relative_eq!(total, 1.0, epsilon = 1e-12);
    }

    #[test]
    fn single_bond_dirichlet() {
        let e = enumerate_sector(&tasep(), 2, 1, None).unwrap();
        // indicator of (1,0)
        let f = [0.0, 1.0];
        assert_relative_eq!(dirichlet(&e, &f).unwrap(), 0.25, epsilon = 1e-15);
        assert_relative_eq!(dirichlet_form(&e, &f, true).unwrap(), 0.25, epsilon = 1e-15);
        assert_eq!(dirichlet(&e, &[3.0, 3.0]).unwrap(), 0.0);
        assert!(matches!(
            dirichlet(&e, &[1.0]),
            Err(SpectralError::Dimension { .. })
        ));
    }

    #[test]
    fn two_site_gap_is_one() {
        let e = enumerate_sector(&tasep(), 2, 1, None).unwrap();
        let g = spectral_gap(&e).unwrap();
        assert_relative_eq!(g.gap, 1.0, epsilon = 1e-12);
        assert_relative_eq!(g.rayleigh, 1.0, epsilon = 1e-10);
    }

    #[test]
    fn tasep_gap_is_ssep_gap() {
        // the reversible part of TASEP is SSEP at rate 1/2 on a segment
        for l in 2..=8usize {
            let worst = (0..=l as i64)
                .filter_map(|k| {
                    let e = enumerate_sector(&tasep(), l, k, None).unwrap();
                    (e.len() > 1).then(|| spectral_gap(&e).unwrap().gap)
                })
                .fold(f64::INFINITY, f64::min);
            let single = 1.0 - (std::f64::consts::PI / l as f64).cos();
            assert_relative_eq!(worst, single, epsilon = 1e-9);
        }
    }

    #[test]
    fn free_boundary_generator_is_not_stationary_but_symmetrization_is() {
        let e = enumerate_sector(&tasep(), 2, 1, None).unwrap();
        let op = e.operator();
        assert!(op.stationarity_residual() > 0.1);
        assert!(op.sym_stationarity_residual() < 1e-15);
        assert!(op.row_sum_residual() < 1e-15);
    }

    #[test]
    fn sigma_bar_two_state_oracle() {
        let e = enumerate_sector(&tasep(), 2, 1, None).unwrap();
        for a in [0.1, 1.0] {
            let s = sigma_bar(&e, &[a, -a]).unwrap();
            // Sym = [[-1/2, 1/2], [1/2, -1/2]] + diag(a, -a)
            let exact = -0.5 + (0.25 + a * a).sqrt();
            assert_relative_eq!(s.value, exact, epsilon = 1e-12);
            assert_relative_eq!(s.variational, exact, epsilon = 1e-8);
        }
        assert!(sigma_bar(&e, &[0.0, 0.0]).unwrap().value.abs() < 1e-14);
        assert_relative_eq!(
            sigma_bar(&e, &[0.7, 0.7]).unwrap().value,
            0.7,
            epsilon = 1e-12
        );
    }

    #[test]
    fn gap_perturbation_two_state_example() {
        let e = enumerate_sector(&tasep(), 2, 1, None).unwrap();
        let p = check_gap_perturbation(&e, &[1.0, -1.0], 0.2).unwrap();
        assert_relative_eq!(p.rhs, 0.04 / 0.6, epsilon = 1e-12);
        assert!(p.holds());
        assert!(matches!(
            check_gap_perturbation(&e, &[1.0, -1.0], 0.6),
            Err(SpectralError::Epsilon { .. })
        ));
    }

    #[test]
    fn spin_average_is_density() {
        let f = kex2();
        let e = enumerate_sector(&f, 5, 7, None).unwrap();
        let m = canonical_expectation(&e, &Cylinder::Spin).unwrap();
        assert_relative_eq!(m.mean, 7.0 / 5.0, epsilon = 1e-13);
        assert!(m.variance < 1e-20);
        assert!(matches!(
            canonical_expectation(&enumerate_sector(&f, 1, 1, None).unwrap(), &Cylinder::Flux),
            Err(SpectralError::CylinderBase { .. })
        ));
    }

    #[test]
    fn full_cylinder_equals_direct_conditional_sum() {
        let f = kex2();
        let (l, k) = (3usize, 3i64);
        let values: Vec<f64> = (0..27).map(|i| ((i * 37) % 11) as f64 - 5.0).collect();
        let psi = Cylinder::Table {
            base: 3,
            lo: 0,
            hi: 2,
            values: values.clone(),
        };
        let e = enumerate_sector(&f, l, k, None).unwrap();
        let m = canonical_expectation(&e, &psi).unwrap().mean;
        // direct: Σ_{z: Σz=k} Π π(z_i) ψ(z) / Σ Π π(z_i)
        let (mut num, mut den) = (0.0, 0.0);
        for a in 0..3i64 {
            for b in 0..3i64 {
                for c in 0..3i64 {
                    if a + b + c != k {
                        continue;
                    }
                    let w = (f.log_pi(a) + f.log_pi(b) + f.log_pi(c)).exp();
                    num += w * values[(a * 9 + b * 3 + c) as usize];
                    den += w;
                }
            }
        }
        assert_relative_eq!(m, num / den, epsilon = 1e-13);
    }

    #[test]
    fn flux_equivalence_decays_like_inverse_length() {
        let sweep = equivalence_sweep(&tasep(), &Cylinder::Flux, 0.5, &[2, 4, 6, 8]).unwrap();
        for p in &sweep.points {
            assert_relative_eq!(p.abs_error, 0.25 / (p.l as f64 - 1.0), epsilon = 1e-13);
        }
        let xs: Vec<f64> = [2.0f64, 4.0, 6.0, 8.0].iter().map(|l| l.ln()).collect();
        let ys: Vec<f64> = [2.0f64, 4.0, 6.0, 8.0]
            .iter()
            .map(|l| (0.25 / (l - 1.0)).ln())
            .collect();
        let (mx, my) = (xs.iter().sum::<f64>() / 4.0, ys.iter().sum::<f64>() / 4.0);
        let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
        let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
        assert_relative_eq!(sweep.fitted_slope, sxy / sxx, epsilon = 1e-10);
        assert!(sweep.fitted_slope < -1.0);
    }

    #[test]
    fn sector_decomposition_and_convexity() {
        let r = check_sector_decomposition(&tasep(), 4, 2, 20, 5).unwrap();
        assert!(r.max_identity_violation < 1e-10);
        assert_eq!(r.convex_violations, 0);
    }

    #[test]
    fn constant_density_has_zero_forms() {
        let f = tasep();
        let e = enumerate_sector(&f, 4, 2, None).unwrap();
        assert_eq!(dirichlet(&e, &vec![1.0; e.len()]).unwrap(), 0.0);
    }

    #[test]
    fn nondegeneracy_ratio_for_tasep() {
        let m = catalog(&Catalog::Tasep).unwrap();
        assert_relative_eq!(
            nondegeneracy_ratio(&m, (0, 1)).unwrap(),
            1.0,
            epsilon = 1e-12
        );
    }

    proptest! {
        #[test]
        fn forward_and_reversed_forms_agree(f in proptest::collection::vec(-3.0f64..3.0, 16)) {
            let e = enumerate_sector(&kex2(), 4, 3, None).unwrap();
            let f = &f[..e.len()];
            let a = dirichlet_form(&e, f, false).unwrap();
            let b = dirichlet_form(&e, f, true).unwrap();
            prop_assert!((a - b).abs() <= 1e-12 * (1.0 + a.abs()));
            prop_assert!(a >= 0.0);
        }

        #[test]
        fn generator_and_reversal_are_adjoint(
            f in proptest::collection::vec(-3.0f64..3.0, 16),
            g in proptest::collection::vec(-3.0f64..3.0, 16),
        ) {
            let e = enumerate_sector(&kex2(), 4, 3, None).unwrap();
            let op = e.operator();
            let n = e.len();
            prop_assert!(op.adjointness_residual(&f[..n], &g[..n]) < 1e-12);
        }

        #[test]
        fn sigma_bar_dominates_mean(v in proptest::collection::vec(-2.0f64..2.0, 32)) {
            let e = enumerate_sector(&kex2(), 4, 4, None).unwrap();
            let v = &v[..e.len()];
            let s = sigma_bar(&e, v).unwrap();
            prop_assert!(s.value >= e.expectation(v) - 1e-12);
            prop_assert!((s.value - s.variational).abs() < 1e-8);
        }
    }
}
