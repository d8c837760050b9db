//! Continuous-time kinetic Monte Carlo on the discrete torus.
//!
//! Bond `j` carries rate `w_j = c(z_j, z_{j+1})`; a jump moves one unit of spin
//! from site `j` to `j + 1`. Bonds are selected through a prefix-sum tree and
//! only the three bonds touching the moved pair are re-rated.

mod rate_index;

use std::collections::hash_map::Entry;
use std::collections::HashMap;
use std::time::Instant;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use rate_index::RateIndex;

use crate::blockstats::weighted_fluctuation;
use crate::burgers::{shock_time, Profile, HORIZON_MARGIN};
use crate::equilibrium::{EquilibriumError, EquilibriumFamily, FluxDerivatives};
use crate::experiment::seed_plan;
use crate::model::{RateModel, Spin};
use crate::trig::{PeriodicField, TrigPoly};

/// Trees are rebuilt from their leaves after this many updates.
const REBUILD_EVERY: u64 = 1 << 22;

#[derive(Debug, Error)]
pub enum SimError {
    #[error("site {site}: density {v} not attainable: {source}")]
    DensityOutOfRange {
        site: usize,
        v: f64,
        #[source]
        source: EquilibriumError,
    },
    #[error("block size l = {l} incompatible with N = {n} (need 1 <= l <= N/8)")]
    Block { l: usize, n: usize },
    #[error("ring size N = {0} too small")]
    RingSize(usize),
    #[error("beta = {0} outside (0, 1/5)")]
    Beta(f64),
    #[error("replica count must be at least 1")]
    Replicas,
    #[error("measurement times must be sorted and lie in [0, T = {horizon}], got {times:?}")]
    Times { times: Vec<f64>, horizon: f64 },
    #[error("T = {horizon} is not below {margin} * T* = {limit} (shock time T* = {t_star})")]
    PastShock {
        horizon: f64,
        t_star: f64,
        limit: f64,
        margin: f64,
    },
    #[error("c0 = {0} is degenerate; Burgers scaling needs c0 != 0")]
    Degenerate(f64),
    #[error("micro-time target {target} is before the current time {now}")]
    Backwards { target: f64, now: f64 },
    #[error("spin configuration left S at site {site}: {value}")]
    OutOfBounds { site: usize, value: Spin },
    #[error(transparent)]
    Equilibrium(#[from] EquilibriumError),
}

/// Spins on the ring `Z / NZ` together with the microscopic clock.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Configuration {
    pub spins: Vec<Spin>,
    pub micro_time: f64,
}

impl Configuration {
    pub fn new(spins: Vec<Spin>) -> Self {
        Self {
            spins,
            micro_time: 0.0,
        }
    }

    pub fn len(&self) -> usize {
        self.spins.len()
    }

    pub fn is_empty(&self) -> bool {
        self.spins.is_empty()
    }

    pub fn total(&self) -> i64 {
        self.spins.iter().sum()
    }
}

/// Dense `c(x, y)` lookup over a spin window, falling back to the model outside it.
#[derive(Debug, Clone)]
pub struct RateLookup {
    model: RateModel,
    lo: Spin,
    width: usize,
    table: Vec<f64>,
}

impl RateLookup {
    pub fn new(model: &RateModel, lo: Spin, hi: Spin) -> Self {
        let width = (hi - lo + 1).max(1) as usize;
        let mut table = vec![0.0; width * width];
        for x in 0..width {
            for y in 0..width {
                table[x * width + y] = model.rate(lo + x as Spin, lo + y as Spin);
            }
        }
        Self {
            model: model.clone(),
            lo,
            width,
            table,
        }
    }

    #[inline]
    pub fn rate(&self, x: Spin, y: Spin) -> f64 {
        let (i, j) = ((x - self.lo) as usize, (y - self.lo) as usize);
        if i < self.width && j < self.width {
            self.table[i * self.width + j]
        } else {
            self.model.rate(x, y)
        }
    }
}

/// A single trajectory: configuration, bond rates and the compensated clock.
#[derive(Debug, Clone)]
pub struct Trajectory {
    config: Configuration,
    rates: RateIndex,
    lookup: RateLookup,
    clock_carry: f64,
    events: u64,
    updates: u64,
}

impl Trajectory {
    pub fn new(model: &RateModel, config: Configuration) -> Result<Self, SimError> {
        let n = config.len();
        if n < 2 {
            return Err(SimError::RingSize(n));
        }
        let bounds = model.bounds();
        if let Some((site, &value)) = config
            .spins
            .iter()
            .enumerate()
            .find(|(_, z)| !bounds.contains(**z))
        {
            return Err(SimError::OutOfBounds { site, value });
        }
        let lo = config.spins.iter().copied().min().unwrap_or(0) - 2;
        let hi = config.spins.iter().copied().max().unwrap_or(0) + 2;
        let (lo, hi) = (
            lo.max(bounds.z_min.unwrap_or(lo)),
            hi.min(bounds.z_max.unwrap_or(hi)),
        );
        let lookup = RateLookup::new(model, lo, hi.min(lo + 256));
        let bond_rates: Vec<f64> = (0..n)
            .map(|j| lookup.rate(config.spins[j], config.spins[(j + 1) % n]))
            .collect();
        Ok(Self {
            config,
            rates: RateIndex::new(&bond_rates),
            lookup,
            clock_carry: 0.0,
            events: 0,
            updates: 0,
        })
    }

    pub fn config(&self) -> &Configuration {
        &self.config
    }

    pub fn into_config(self) -> Configuration {
        self.config
    }

    pub fn rates(&self) -> &RateIndex {
        &self.rates
    }

    pub fn events(&self) -> u64 {
        self.events
    }

    #[inline]
    fn rerate(&mut self, bond: usize) {
        let n = self.config.spins.len();
        let w = self
            .lookup
            .rate(self.config.spins[bond], self.config.spins[(bond + 1) % n]);
        self.rates.set(bond, w);
    }

    /// Runs the jump chain up to microscopic time `target`. By memorylessness the
    /// pending jump past `target` is discarded and the clock is set to `target`.
    pub fn run_until<R: Rng + ?Sized>(&mut self, target: f64, rng: &mut R) -> Result<(), SimError> {
        let now = self.config.micro_time;
        if target < now {
            return Err(SimError::Backwards { target, now });
        }
        let n = self.config.spins.len();
        loop {
            let total = self.rates.total();
            if total <= 0.0 {
                break;
            }
            let wait = -(1.0 - rng.random::<f64>()).ln() / total;
            // Kahan step on the clock
            let y = wait - self.clock_carry;
            let next = self.config.micro_time + y;
            if next > target {
                break;
            }
            self.clock_carry = (next - self.config.micro_time) - y;
            self.config.micro_time = next;

            let bond = self.rates.find(rng.random::<f64>() * total);
            let right = (bond + 1) % n;
            self.config.spins[bond] -= 1;
            self.config.spins[right] += 1;
            debug_assert!(self.lookup.model.bounds().contains(self.config.spins[bond]));
            debug_assert!(self
                .lookup
                .model
                .bounds()
                .contains(self.config.spins[right]));
            self.rerate((bond + n - 1) % n);
            self.rerate(bond);
            self.rerate(right);
            self.events += 1;
            self.updates += 3;
            if self.updates >= REBUILD_EVERY {
                self.rates.rebuild();
                self.updates = 0;
            }
        }
        self.config.micro_time = target;
        self.clock_carry = 0.0;
        Ok(())
    }
}

/// Convenience wrapper: runs `config` under `model` until `target`.
pub fn run_until<R: Rng + ?Sized>(
    config: Configuration,
    model: &RateModel,
    target: f64,
    rng: &mut R,
) -> Result<Configuration, SimError> {
    let mut trajectory = Trajectory::new(model, config)?;
    trajectory.run_until(target, rng)?;
    Ok(trajectory.into_config())
}

/// Inverse-CDF sampler for one `π_θ`.
#[derive(Debug, Clone)]
pub struct SiteSampler {
    lo: Spin,
    cdf: Vec<f64>,
}

impl SiteSampler {
    pub fn new(family: &EquilibriumFamily, theta: f64) -> Result<Self, EquilibriumError> {
        let pmf = family.pmf(theta)?;
        let mut acc = 0.0;
        let mut cdf: Vec<f64> = pmf
            .iter()
            .map(|p| {
                acc += p;
                acc
            })
            .collect();
        let total = acc;
        cdf.iter_mut().for_each(|c| *c /= total);
        Ok(Self {
            lo: family.window().0,
            cdf,
        })
    }

    #[inline]
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Spin {
        let u = rng.random::<f64>();
        let i = self
            .cdf
            .partition_point(|&c| c <= u)
            .min(self.cdf.len() - 1);
        self.lo + i as Spin
    }
}

/// Draws `z_j ~ π_{θ(v0 + N^{-β} u0(j/N))}` independently.
pub fn sample_initial<R: Rng + ?Sized>(
    family: &EquilibriumFamily,
    n: usize,
    beta: f64,
    v0: f64,
    u0: &impl PeriodicField,
    rng: &mut R,
) -> Result<Configuration, SimError> {
    if n < 2 {
        return Err(SimError::RingSize(n));
    }
    let scale = (n as f64).powf(-beta);
    let mut samplers: HashMap<u64, SiteSampler> = HashMap::new();
    let mut spins = Vec::with_capacity(n);
    for j in 0..n {
        let v = v0 + scale * u0.value(j as f64 / n as f64);
        let key = v.to_bits();
        let sampler = match samplers.entry(key) {
            Entry::Occupied(e) => e.into_mut(),
            Entry::Vacant(e) => {
                let theta = family
                    .theta_of_v(v)
                    .map_err(|source| SimError::DensityOutOfRange { site: j, v, source })?;
                e.insert(SiteSampler::new(family, theta)?)
            }
        };
        spins.push(sampler.sample(rng));
    }
    Ok(Configuration::new(spins))
}

/// Parameters of a perturbation experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub n: usize,
    pub beta: f64,
    pub v0: f64,
    pub u0: TrigPoly,
    /// Macroscopic horizon `T`.
    pub horizon: f64,
    /// Macroscopic measurement times in `[0, T]`.
    pub times: Vec<f64>,
    /// Block length `l`.
    pub block: usize,
    pub replicas: usize,
    pub seed: u64,
    /// Test functions with ids.
    pub phis: Vec<(String, TrigPoly)>,
    /// Points of the measured density profile.
    pub grid_points: usize,
}

impl ExperimentConfig {
    /// `⌈N^{2β} log N⌉`.
    pub fn default_block(n: usize, beta: f64) -> usize {
        let n = n as f64;
        (n.powf(2.0 * beta) * n.ln()).ceil() as usize
    }

    /// Microscopic time of macroscopic time `t`: `N^{1+β} t`.
    pub fn micro_time(&self, t: f64) -> f64 {
        (self.n as f64).powf(1.0 + self.beta) * t
    }

    /// Checks every precondition of a run against the family and flux data.
    pub fn validate(
        &self,
        family: &EquilibriumFamily,
        flux: &FluxDerivatives,
    ) -> Result<(), SimError> {
        if !(self.beta > 0.0 && self.beta < 0.2) {
            return Err(SimError::Beta(self.beta));
        }
        if self.n < 16 {
            return Err(SimError::RingSize(self.n));
        }
        if self.block == 0 || self.block > self.n / 8 {
            return Err(SimError::Block {
                l: self.block,
                n: self.n,
            });
        }
        if self.replicas == 0 {
            return Err(SimError::Replicas);
        }
        let sorted = self.times.windows(2).all(|w| w[0] <= w[1]);
        if !sorted || self.times.iter().any(|&t| !(t >= 0.0 && t <= self.horizon)) {
            return Err(SimError::Times {
                times: self.times.clone(),
                horizon: self.horizon,
            });
        }
        if flux.degenerate {
            return Err(SimError::Degenerate(flux.c0));
        }
        let t_star = shock_time(&self.u0, flux.c0);
        let limit = HORIZON_MARGIN * t_star;
        if self.horizon >= limit {
            return Err(SimError::PastShock {
                horizon: self.horizon,
                t_star,
                limit,
                margin: HORIZON_MARGIN,
            });
        }
        let amp = (self.n as f64).powf(-self.beta) * self.u0.max_abs();
        for v in [self.v0 - amp, self.v0 + amp] {
            family
                .theta_of_v(v)
                .map_err(|source| SimError::DensityOutOfRange { site: 0, v, source })?;
        }
        Ok(())
    }

    /// `(N^{2β}, l, N^{(1+β)/3})`: the block size should sit well inside.
    pub fn block_window(&self) -> (f64, usize, f64) {
        let n = self.n as f64;
        (
            n.powf(2.0 * self.beta),
            self.block,
            n.powf((1.0 + self.beta) / 3.0),
        )
    }
}

/// Empirical `û` on `m` points: centered block averages of length `l`, read in
/// the frame moving by `s = N^{1+β} b0 t` sites (linear interpolation between
/// the neighbouring integer shifts), `û = N^β (z̄ - v0)`.
pub fn measure_density(
    config: &Configuration,
    v0: f64,
    b0: f64,
    beta: f64,
    t: f64,
    l: usize,
    m: usize,
) -> Result<Profile, SimError> {
    let n = config.len();
    if l == 0 || l > n {
        return Err(SimError::Block { l, n });
    }
    let nf = n as f64;
    let shift = nf.powf(1.0 + beta) * b0 * t;
    // prefix sums over two turns of the ring
    let mut prefix = vec![0i64; 2 * n + 1];
    for k in 0..2 * n {
        prefix[k + 1] = prefix[k] + config.spins[k % n];
    }
    let half = l / 2;
    let block_mean = |j: i64| -> f64 {
        let start = (j - half as i64).rem_euclid(n as i64) as usize;
        (prefix[start + l] - prefix[start]) as f64 / l as f64
    };
    let amplify = nf.powf(beta);
    let values = (0..m)
        .map(|k| {
            let p = nf * k as f64 / m as f64 + shift;
            let base = p.floor();
            let frac = p - base;
            let j = base as i64;
            let mean = (1.0 - frac) * block_mean(j) + frac * block_mean(j + 1);
            amplify * (mean - v0)
        })
        .collect();
    Ok(Profile::new(values))
}

/// State of one replica at one measurement time.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Snapshot {
    pub t: f64,
    pub profile: Profile,
    /// Weighted fluctuation statistic per test function, in the order of `phis`.
    pub statistics: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReplicaRun {
    pub replica: usize,
    pub snapshots: Vec<Snapshot>,
    pub events: u64,
    pub initial_total: i64,
    pub final_total: i64,
}

/// Timing of a batch of replicas.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RunTelemetry {
    pub total_events: u64,
    pub wall_seconds: f64,
}

impl RunTelemetry {
    pub fn events_per_second(&self) -> f64 {
        if self.wall_seconds > 0.0 {
            self.total_events as f64 / self.wall_seconds
        } else {
            0.0
        }
    }
}

/// Runs one replica: samples the initial law and measures at every time.
pub fn run_replica(
    family: &EquilibriumFamily,
    config: &ExperimentConfig,
    b0: f64,
    replica: usize,
    cell: u64,
) -> Result<ReplicaRun, SimError> {
    let mut rng = seed_plan(config.seed, replica as u64, cell).rng();
    let initial = sample_initial(
        family,
        config.n,
        config.beta,
        config.v0,
        &config.u0,
        &mut rng,
    )?;
    let initial_total = initial.total();
    let mut trajectory = Trajectory::new(family.model(), initial)?;
    let mut snapshots = Vec::with_capacity(config.times.len());
    for &t in &config.times {
        trajectory.run_until(config.micro_time(t), &mut rng)?;
        let state = trajectory.config();
        let profile = measure_density(
            state,
            config.v0,
            b0,
            config.beta,
            t,
            config.block,
            config.grid_points,
        )?;
        let statistics = config
            .phis
            .iter()
            .map(|(_, phi)| weighted_fluctuation(&state.spins, phi, config.beta, config.v0, b0, t))
            .collect();
        snapshots.push(Snapshot {
            t,
            profile,
            statistics,
        });
    }
    Ok(ReplicaRun {
        replica,
        snapshots,
        events: trajectory.events(),
        initial_total,
        final_total: trajectory.config().total(),
    })
}

/// Runs all replicas of `config` in parallel; output order is by replica.
pub fn run_replicas(
    family: &EquilibriumFamily,
    config: &ExperimentConfig,
    b0: f64,
    cell: u64,
) -> Result<(Vec<ReplicaRun>, RunTelemetry), SimError> {
    if config.replicas == 0 {
        return Err(SimError::Replicas);
    }
    let start = Instant::now();
    let runs = (0..config.replicas)
        .into_par_iter()
        .map(|replica| run_replica(family, config, b0, replica, cell))
        .collect::<Result<Vec<_>, _>>()?;
    let telemetry = RunTelemetry {
        total_events: runs.iter().map(|r| r.events).sum(),
        wall_seconds: start.elapsed().as_secs_f64(),
    };
    Ok((runs, telemetry))
}
