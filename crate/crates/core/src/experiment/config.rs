//! TOML run configuration.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::model::{catalog, Catalog, RFamily, RateModel, Spin};
use crate::trig::{TrigPoly, MAX_TEST_DEGREE};
use crate::Error;

/// A scalar or a list of scalars; lists drive `sweep`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum OneOrMany<T> {
    One(T),
    Many(Vec<T>),
}

impl<T: Clone> OneOrMany<T> {
    pub fn values(&self) -> Vec<T> {
        match self {
            OneOrMany::One(v) => vec![v.clone()],
            OneOrMany::Many(v) => v.clone(),
        }
    }

    pub fn first(&self) -> Option<T> {
        self.values().into_iter().next()
    }

    pub fn is_list(&self) -> bool {
        matches!(self, OneOrMany::Many(_))
    }
}

/// Model description, either a catalog entry or explicit tables.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSpec {
    /// `tasep`, `k-exclusion`, `zero-range`, `bricklayers` or `table`.
    pub kind: String,
    pub name: Option<String>,
    pub z_min: Option<Spin>,
    pub z_max: Option<Spin>,
    #[serde(rename = "K")]
    pub k: Option<Spin>,
    /// `alpha(1..=K)` for K-exclusion.
    pub alpha: Option<Vec<f64>>,
    /// Row-major `c(x, y)` over `[z_min, z_max]`.
    pub c_table: Option<Vec<f64>>,
    /// `r(1), r(2), ...`, or `r(1-n)..r(n)` for two-sided bricklayers.
    pub r_table: Option<Vec<f64>>,
    /// `linear`, `affine` or `table`.
    pub r_family: Option<String>,
    /// `[intercept, slope]` for the affine family.
    pub r_affine: Option<[f64; 2]>,
}

impl Default for ModelSpec {
    fn default() -> Self {
        Self {
            kind: "tasep".into(),
            name: None,
            z_min: None,
            z_max: None,
            k: None,
            alpha: None,
            c_table: None,
            r_table: None,
            r_family: None,
            r_affine: None,
        }
    }
}

impl ModelSpec {
    pub fn tasep() -> Self {
        Self::default()
    }

    pub fn k_exclusion(k: Spin) -> Self {
        Self {
            kind: "k-exclusion".into(),
            k: Some(k),
            ..Self::default()
        }
    }

    fn r_family(&self) -> Result<RFamily, Error> {
        match self
            .r_family
            .as_deref()
            .unwrap_or(if self.r_table.is_some() {
                "table"
            } else {
                "linear"
            }) {
            "linear" => Ok(RFamily::Linear),
            "affine" => {
                let [intercept, slope] = self.r_affine.ok_or_else(|| {
                    Error::Config(
                        "r_family = \"affine\" needs r_affine = [intercept, slope]".into(),
                    )
                })?;
                Ok(RFamily::Affine { intercept, slope })
            }
            "table" => Ok(RFamily::Table(self.r_table.clone().ok_or_else(|| {
                Error::Config("r_family = \"table\" needs r_table".into())
            })?)),
            other => Err(Error::Config(format!(
                "unknown r_family {other:?} (linear, affine, table)"
            ))),
        }
    }

    pub fn build(&self) -> Result<RateModel, Error> {
        let model = match self.kind.as_str() {
            "tasep" => catalog(&Catalog::Tasep)?,
            "k-exclusion" => catalog(&Catalog::KExclusion {
                k: self
                    .k
                    .ok_or_else(|| Error::Config("k-exclusion needs K".into()))?,
                alpha: self.alpha.clone(),
            })?,
            "zero-range" => catalog(&Catalog::ZeroRange(self.r_family()?))?,
            "bricklayers" => match (&self.r_table, self.r_family.as_deref()) {
                (Some(values), Some("two-sided")) => {
                    RateModel::bricklayers_two_sided("bricklayers", values)?
                }
                _ => catalog(&Catalog::Bricklayers(self.r_family()?))?,
            },
            "table" => {
                let (lo, hi) = self
                    .z_min
                    .zip(self.z_max)
                    .ok_or_else(|| Error::Config("table models need z_min and z_max".into()))?;
                let table = self
                    .c_table
                    .clone()
                    .ok_or_else(|| Error::Config("table models need c_table".into()))?;
                RateModel::from_table(
                    self.name.clone().unwrap_or_else(|| "table".into()),
                    lo,
                    hi,
                    table,
                )?
            }
            other => {
                return Err(Error::Config(format!(
                "unknown model kind {other:?} (tasep, k-exclusion, zero-range, bricklayers, table)"
            )))
            }
        };
        Ok(match &self.name {
            Some(name) => model.renamed(name.clone()),
            None => model,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct U0Spec {
    pub amplitude: f64,
    pub mode: usize,
    /// Use `cos` instead of `sin`.
    #[serde(default)]
    pub cosine: bool,
}

impl U0Spec {
    pub fn profile(&self) -> Result<TrigPoly, Error> {
        if self.mode == 0 || !self.amplitude.is_finite() {
            return Err(Error::Config(
                "u0 needs a finite amplitude and mode >= 1".into(),
            ));
        }
        Ok(if self.cosine {
            TrigPoly::cosine(self.amplitude, self.mode)
        } else {
            TrigPoly::sine(self.amplitude, self.mode)
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PhiSpec {
    pub degree: usize,
    /// Subset of `sin{k}` / `cos{k}` ids; all of them when absent.
    pub ids: Option<Vec<String>>,
}

impl PhiSpec {
    pub fn functions(&self) -> Result<Vec<(String, TrigPoly)>, Error> {
        if self.degree == 0 || self.degree > MAX_TEST_DEGREE {
            return Err(Error::Config(format!(
                "phi.degree must be in 1..={MAX_TEST_DEGREE}"
            )));
        }
        let basis = TrigPoly::basis(self.degree);
        match &self.ids {
            None => Ok(basis),
            Some(ids) => ids
                .iter()
                .map(|id| {
                    basis
                        .iter()
                        .find(|(name, _)| name == id)
                        .cloned()
                        .ok_or_else(|| {
                            Error::Config(format!(
                                "phi id {id:?} not in the degree-{} basis",
                                self.degree
                            ))
                        })
                })
                .collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BurgersSpec {
    /// Output grid points.
    pub points: Option<usize>,
    /// Also run the finite-volume solver at this resolution.
    pub godunov_cells: Option<usize>,
    pub cfl: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GapSpec {
    pub lengths: Vec<usize>,
    /// Per-site window for unbounded spins.
    pub clip: Option<[Spin; 2]>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnsemblesSpec {
    pub density: f64,
    pub lengths: Vec<usize>,
    /// `flux` or `z`.
    pub psi: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KurschakConfig {
    pub gamma: f64,
    pub lengths: Vec<usize>,
    pub samples: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FluxSpec {
    pub points: usize,
}

/// Whole configuration file. Every experiment key is optional; missing keys
/// fall back to the flagship run.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub model: ModelSpec,
    #[serde(rename = "N")]
    pub n: Option<OneOrMany<usize>>,
    pub beta: Option<OneOrMany<f64>>,
    pub v0: Option<f64>,
    pub u0: Option<U0Spec>,
    #[serde(rename = "T")]
    pub horizon: Option<f64>,
    pub times: Option<Vec<f64>>,
    pub replicas: Option<usize>,
    pub l: Option<usize>,
    pub seed: Option<u64>,
    pub phi: Option<PhiSpec>,
    /// Points of the measured density profile.
    pub grid: Option<usize>,
    pub flux: Option<FluxSpec>,
    pub burgers: Option<BurgersSpec>,
    pub gap: Option<GapSpec>,
    pub ensembles: Option<EnsemblesSpec>,
    pub kurschak: Option<KurschakConfig>,
}

pub const DEFAULT_TIMES: [f64; 3] = [0.02, 0.05, 0.08];

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self, Error> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self, Error> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Io {
            path: path.to_path_buf(),
            source: e,
        })?;
        Self::from_toml(&text)
    }

    pub fn ns(&self) -> Vec<usize> {
        self.n
            .as_ref()
            .map(|v| v.values())
            .unwrap_or_else(|| vec![1000])
    }

    pub fn betas(&self) -> Vec<f64> {
        self.beta
            .as_ref()
            .map(|v| v.values())
            .unwrap_or_else(|| vec![0.15])
    }

    pub fn v0(&self) -> f64 {
        self.v0.unwrap_or(0.5)
    }

    pub fn u0(&self) -> Result<TrigPoly, Error> {
        self.u0
            .unwrap_or(U0Spec {
                amplitude: 0.5,
                mode: 1,
                cosine: false,
            })
            .profile()
    }

    pub fn times(&self) -> Vec<f64> {
        self.times.clone().unwrap_or_else(|| DEFAULT_TIMES.to_vec())
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
            .unwrap_or_else(|| self.times().iter().copied().fold(0.0, f64::max))
    }

    pub fn replicas(&self) -> usize {
        self.replicas.unwrap_or(40)
    }

    pub fn seed(&self) -> u64 {
        self.seed.unwrap_or(1)
    }

    pub fn grid(&self) -> usize {
        self.grid.unwrap_or(256)
    }

    pub fn phis(&self) -> Result<Vec<(String, TrigPoly)>, Error> {
        self.phi
            .clone()
            .unwrap_or(PhiSpec {
                degree: 2,
                ids: Some(vec!["sin1".into(), "cos1".into(), "sin2".into()]),
            })
            .functions()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flagship_defaults() {
        let c = RunConfig::from_toml("").unwrap();
        assert_eq!(c.ns(), vec![1000]);
        assert_eq!(c.betas(), vec![0.15]);
        assert_eq!(c.horizon(), 0.08);
        let ids: Vec<String> = c.phis().unwrap().into_iter().map(|p| p.0).collect();
        assert_eq!(ids, ["sin1", "cos1", "sin2"]);
        assert_eq!(c.model.build().unwrap().name(), "tasep");
    }

    #[test]
    fn lists_and_model_keys() {
        let c = RunConfig::from_toml(
            r#"
            N = [1000, 2000]
            beta = 0.1
            [model]
            kind = "k-exclusion"
            K = 2
            [u0]
            amplitude = 0.2
            mode = 2
            "#,
        )
        .unwrap();
        assert!(c.n.as_ref().unwrap().is_list());
        assert_eq!(c.ns(), vec![1000, 2000]);
        assert_eq!(c.model.build().unwrap().name(), "2-exclusion");
        assert_eq!(c.u0().unwrap(), TrigPoly::sine(0.2, 2));
    }

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(RunConfig::from_toml("Nsites = 4").is_err());
        assert!(RunConfig::from_toml("[model]\nkind = \"tasep\"\ncolour = 1").is_err());
    }

    #[test]
    fn model_spec_errors() {
        let spec = ModelSpec {
            kind: "zero-range".into(),
            r_family: Some("affine".into()),
            ..ModelSpec::default()
        };
        assert!(spec.build().is_err());
        let spec = ModelSpec {
            kind: "table".into(),
            z_min: Some(0),
            z_max: Some(1),
            c_table: Some(vec![0.0, 0.0, 1.0, 0.0]),
            ..ModelSpec::default()
        };
        assert_eq!(spec.build().unwrap().rate(1, 0), 1.0);
        assert!(ModelSpec {
            kind: "nope".into(),
            ..ModelSpec::default()
        }
        .build()
        .is_err());
    }
}
