//! Kinetic Monte Carlo and exact numerics for one-dimensional misanthrope-type
//! particle systems near equilibrium.
//!
//! A unit of spin jumps from site `j` to `j + 1` at rate `c(z_j, z_{j+1})`.
//! The crate builds and validates such rate functions ([`model`]), computes
//! their stationary product measures and hydrodynamic flux ([`equilibrium`]),
//! simulates them on the torus ([`simulate`]), solves the limiting Burgers
//! equation ([`burgers`]), evaluates block statistics ([`blockstats`]) and
//! exact finite-block spectra ([`spectral`]). [`experiment`] wires these into
//! reproducible runs that write CSV and JSON artifacts.

pub mod blockstats;
pub mod burgers;
pub mod equilibrium;
pub mod experiment;
pub mod model;
pub mod simulate;
pub mod spectral;
pub mod trig;

use std::path::PathBuf;

use thiserror::Error;

pub use equilibrium::{EquilibriumFamily, FluxDerivatives};
pub use model::{catalog, Catalog, RFamily, RateModel, Spin};
pub use trig::{PeriodicField, TrigPoly};

#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Model(#[from] model::ModelError),
    #[error(transparent)]
    Equilibrium(#[from] equilibrium::EquilibriumError),
    #[error(transparent)]
    Simulation(#[from] simulate::SimError),
    #[error(transparent)]
    Burgers(#[from] burgers::BurgersError),
    #[error(transparent)]
    BlockStats(#[from] blockstats::BlockStatsError),
    #[error(transparent)]
    Spectral(#[from] spectral::SpectralError),
    #[error("config: {0}")]
    Config(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{file}: non-finite value {value} in column {column}, row {row}")]
    NonFinite {
        file: String,
        column: String,
        row: usize,
        value: f64,
    },
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
