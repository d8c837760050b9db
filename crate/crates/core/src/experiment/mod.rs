//! Named experiments: configuration in, tables and JSON artifacts out.

pub mod config;
pub mod output;

use std::path::Path;
use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::blockstats::{kurschak_probe, KurschakEstimate, KurschakSpec};
use crate::burgers::{shock_time, solve_characteristics, solve_godunov, Profile, HORIZON_MARGIN};
use crate::equilibrium::{EquilibriumFamily, FluxCurve, FluxDerivatives, DEFAULT_EPS_TAIL};
use crate::model::{validate_conditions, ValidationReport};
use crate::simulate::{run_replicas, ExperimentConfig, ReplicaRun, RunTelemetry};
use crate::spectral::{equivalence_sweep, gap_sweep, Cylinder, EnsembleSweep, GapRow};
use crate::trig::{PeriodicField, TrigPoly};
use crate::Error;

pub use config::{ModelSpec, OneOrMany, RunConfig};
pub use output::{Cell, CsvTable};

/// Version tag of `summary.json`.
pub const SUMMARY_SCHEMA_VERSION: u32 = 1;
/// Window used when checking the structural conditions from the CLI.
pub const VALIDATION_WINDOW: i64 = 48;

/// A ChaCha stream: the base seed keys the generator, the stream word encodes
/// `(cell, replica)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct StreamId {
    pub seed: u64,
    pub stream: u64,
}

impl StreamId {
    pub fn rng(&self) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(self.stream);
        rng
    }
}

/// Stream for `replica` within sweep `cell`; injective while both indices fit in 32 bits.
pub fn seed_plan(base_seed: u64, replica: u64, cell: u64) -> StreamId {
    debug_assert!(replica <= u32::MAX as u64 && cell <= u32::MAX as u64);
    StreamId {
        seed: base_seed,
        stream: (cell << 32) | (replica & 0xffff_ffff),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellSeeds {
    pub cell: u64,
    pub streams: Vec<StreamId>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Telemetry {
    pub total_events: u64,
    pub wall_seconds: f64,
}

/// Everything needed to reproduce the files of one run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub experiment: String,
    pub software_version: String,
    pub config: RunConfig,
    pub base_seed: u64,
    pub cells: Vec<CellSeeds>,
    pub telemetry: Option<Telemetry>,
}

impl RunManifest {
    fn new(experiment: &str, config: &RunConfig) -> Self {
        Self {
            experiment: experiment.to_string(),
            software_version: env!("CARGO_PKG_VERSION").to_string(),
            config: config.clone(),
            base_seed: config.seed(),
            cells: Vec::new(),
            telemetry: None,
        }
    }
}

/// Output of one experiment.
#[derive(Debug, Clone, Default)]
pub struct Artifacts {
    pub tables: Vec<CsvTable>,
    pub json: Vec<(String, serde_json::Value)>,
    /// Artifacts of sub-runs, written to the named subdirectories.
    pub children: Vec<(String, Artifacts)>,
    pub report: String,
    /// False when a check reported by the experiment failed.
    pub ok: bool,
}

impl Artifacts {
    fn new() -> Self {
        Self {
            ok: true,
            ..Self::default()
        }
    }

    fn add_json(&mut self, name: &str, value: &impl Serialize) -> Result<(), Error> {
        self.json
            .push((name.to_string(), serde_json::to_value(value)?));
        Ok(())
    }

    pub fn table(&self, name: &str) -> Option<&CsvTable> {
        self.tables.iter().find(|t| t.name() == name)
    }

    pub fn json_value(&self, name: &str) -> Option<&serde_json::Value> {
        self.json.iter().find(|(n, _)| n == name).map(|(_, v)| v)
    }

    pub fn write(&self, dir: &Path) -> Result<(), Error> {
        std::fs::create_dir_all(dir).map_err(|source| Error::Io {
            path: dir.to_path_buf(),
            source,
        })?;
        for table in &self.tables {
            table.write(dir)?;
        }
        for (name, value) in &self.json {
            output::write_json(&dir.join(name), value)?;
        }
        for (sub, child) in &self.children {
            child.write(&dir.join(sub))?;
        }
        Ok(())
    }
}

/// Reads a TOML configuration, or the configuration echoed in a `manifest.json`.
pub fn load_config(path: &Path) -> Result<RunConfig, Error> {
    if path.extension().is_some_and(|e| e == "json") {
        let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })?;
        let manifest: RunManifest = serde_json::from_str(&text)?;
        return Ok(manifest.config);
    }
    RunConfig::load(path)
}

fn family(config: &RunConfig) -> Result<EquilibriumFamily, Error> {
    Ok(EquilibriumFamily::build(
        &config.model.build()?,
        DEFAULT_EPS_TAIL,
    )?)
}

/// Structural conditions of the configured model.
pub fn validate_model(config: &RunConfig) -> Result<(ValidationReport, Artifacts), Error> {
    let model = config.model.build()?;
    let report = validate_conditions(&model, VALIDATION_WINDOW)?;
    let mut artifacts = Artifacts::new();
    artifacts.report = report.to_string();
    artifacts.ok = report.all_passed();
    artifacts.add_json("validation.json", &report)?;
    Ok((report, artifacts))
}

/// `flux.csv` on an evenly spaced density grid.
pub fn flux(config: &RunConfig) -> Result<(FluxCurve, Artifacts), Error> {
    let family = family(config)?;
    let points = config.flux.as_ref().map(|f| f.points).unwrap_or(21);
    let curve = family.flux_curve(config.v0(), &family.density_grid(points))?;
    let mut table = CsvTable::new("flux.csv", &["v", "flux_hat", "b", "c"]);
    for s in &curve.samples {
        table.push(vec![s.v.into(), s.flux_hat.into(), s.b.into(), s.c.into()])?;
    }
    let mut artifacts = Artifacts::new();
    artifacts.report = format!(
        "model {}: at v0 = {}: a0 = {:.12}, b0 = {:.12}, c0 = {:.12}; linear growth constant {:.6}",
        family.model(),
        curve.v0,
        curve.a0,
        curve.b0,
        curve.c0,
        curve.linear_bound
    );
    artifacts.tables.push(table);
    Ok((curve, artifacts))
}

/// Resolved inputs of a simulation cell.
#[derive(Debug, Clone)]
pub struct Prepared {
    pub family: EquilibriumFamily,
    pub flux: FluxDerivatives,
    pub experiment: ExperimentConfig,
    pub shock_time: f64,
}

/// Builds and validates the experiment for one `(N, β)` cell.
pub fn prepare(config: &RunConfig, n: usize, beta: f64) -> Result<Prepared, Error> {
    let family = family(config)?;
    let v0 = config.v0();
    let flux = family.flux_derivatives(v0, None)?;
    let u0 = config.u0()?;
    let experiment = ExperimentConfig {
        n,
        beta,
        v0,
        u0: u0.clone(),
        horizon: config.horizon(),
        times: config.times(),
        block: config
            .l
            .unwrap_or_else(|| ExperimentConfig::default_block(n, beta)),
        replicas: config.replicas(),
        seed: config.seed(),
        phis: config.phis()?,
        grid_points: config.grid(),
    };
    experiment.validate(&family, &flux)?;
    Ok(Prepared {
        shock_time: shock_time(&u0, flux.c0),
        family,
        flux,
        experiment,
    })
}

fn single_cell(config: &RunConfig, what: &str) -> Result<(usize, f64), Error> {
    let (ns, betas) = (config.ns(), config.betas());
    if ns.len() != 1 || betas.len() != 1 {
        return Err(Error::Config(format!(
            "{what} takes a single N and beta; use sweep for lists"
        )));
    }
    Ok((ns[0], betas[0]))
}

fn density_table(runs: &[ReplicaRun]) -> Result<CsvTable, Error> {
    let mut table = CsvTable::new("density_profile.csv", &["replica", "t_macro", "x", "u_hat"]);
    for run in runs {
        for snap in &run.snapshots {
            for (i, &u) in snap.profile.values.iter().enumerate() {
                table.push(vec![
                    run.replica.into(),
                    snap.t.into(),
                    snap.profile.x(i).into(),
                    u.into(),
                ])?;
            }
        }
    }
    Ok(table)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
struct EventsSummary {
    #[serde(rename = "N")]
    n: usize,
    beta: f64,
    total_events: u64,
    wall_seconds: f64,
    events_per_second: f64,
}

fn events_summary(p: &Prepared, telemetry: &RunTelemetry) -> EventsSummary {
    EventsSummary {
        n: p.experiment.n,
        beta: p.experiment.beta,
        total_events: telemetry.total_events,
        wall_seconds: telemetry.wall_seconds,
        events_per_second: telemetry.events_per_second(),
    }
}

fn cell_seeds(p: &Prepared, cell: u64) -> CellSeeds {
    CellSeeds {
        cell,
        streams: (0..p.experiment.replicas as u64)
            .map(|r| seed_plan(p.experiment.seed, r, cell))
            .collect(),
    }
}

fn window_note(p: &Prepared) -> String {
    let (lower, l, upper) = p.experiment.block_window();
    let verdict = if (l as f64) > lower && (l as f64) < upper {
        "inside"
    } else {
        "outside"
    };
    format!("block l = {l}, window N^(2b) = {lower:.1} .. N^((1+b)/3) = {upper:.1} ({verdict})")
}

/// Replicas to every measurement time; writes `density_profile.csv` and `events.json`.
pub fn simulate(config: &RunConfig) -> Result<Artifacts, Error> {
    let (n, beta) = single_cell(config, "simulate")?;
    let p = prepare(config, n, beta)?;
    let (runs, telemetry) = run_replicas(&p.family, &p.experiment, p.flux.b0, 0)?;
    let mut artifacts = Artifacts::new();
    artifacts.tables.push(density_table(&runs)?);
    artifacts.add_json("events.json", &events_summary(&p, &telemetry))?;
    let mut manifest = RunManifest::new("simulate", config);
    manifest.cells.push(cell_seeds(&p, 0));
    manifest.telemetry = Some(Telemetry {
        total_events: telemetry.total_events,
        wall_seconds: telemetry.wall_seconds,
    });
    artifacts.add_json("manifest.json", &manifest)?;
    artifacts.report = format!(
        "{} replicas of N = {n}, beta = {beta}: {} events in {:.2} s; {}",
        runs.len(),
        telemetry.total_events,
        telemetry.wall_seconds,
        window_note(&p)
    );
    Ok(artifacts)
}

fn burgers_points(config: &RunConfig) -> usize {
    config
        .burgers
        .as_ref()
        .and_then(|b| b.points)
        .unwrap_or(1024)
}

/// Burgers solutions at every measurement time (co-moving frame).
fn burgers_solutions(
    u0: &TrigPoly,
    c0: f64,
    times: &[f64],
    points: usize,
) -> Result<Vec<Profile>, Error> {
    times
        .iter()
        .map(|&t| Ok(solve_characteristics(u0, c0, t, points)?))
        .collect()
}

fn burgers_table(times: &[f64], solutions: &[Profile]) -> Result<CsvTable, Error> {
    let mut table = CsvTable::new("burgers.csv", &["t", "x", "u"]);
    for (&t, profile) in times.iter().zip(solutions) {
        for (i, &u) in profile.values.iter().enumerate() {
            table.push(vec![t.into(), profile.x(i).into(), u.into()])?;
        }
    }
    Ok(table)
}

/// `burgers.csv` from characteristics, optionally cross-checked by Godunov.
pub fn burgers(config: &RunConfig) -> Result<Artifacts, Error> {
    let family = family(config)?;
    let flux = family.flux_derivatives(config.v0(), None)?;
    if flux.degenerate {
        return Err(crate::simulate::SimError::Degenerate(flux.c0).into());
    }
    let u0 = config.u0()?;
    let times = config.times();
    let points = burgers_points(config);
    let t_star = shock_time(&u0, flux.c0);
    let solutions = burgers_solutions(&u0, flux.c0, &times, points)?;
    let mut artifacts = Artifacts::new();
    artifacts.tables.push(burgers_table(&times, &solutions)?);
    let mut report = format!(
        "c0 = {:.10}, T* = {t_star:.10} (limit {:.10})",
        flux.c0,
        HORIZON_MARGIN * t_star
    );
    if let Some(cells) = config.burgers.as_ref().and_then(|b| b.godunov_cells) {
        let cfl = config.burgers.as_ref().and_then(|b| b.cfl).unwrap_or(0.9);
        let start = Profile::cell_averages(&u0, cells);
        for &t in &times {
            let fv = solve_godunov(&start, flux.c0, t, cfl)?;
            let reference = solve_characteristics(&u0, flux.c0, t, cells)?;
            report.push_str(&format!(
                "\nt = {t}: godunov L1 distance {:.3e}",
                fv.l1_distance(&reference)
            ));
        }
    }
    artifacts.report = report;
    Ok(artifacts)
}

/// Per-test-function summary at one time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StatSummary {
    pub phi_id: String,
    pub target_integral: f64,
    pub mean: f64,
    pub stderr: f64,
    /// `(mean - target) / stderr`
    pub z_score: f64,
    /// Replica mean of `|S_N - target|`.
    pub mean_abs_error: f64,
    pub abs_error_stderr: f64,
    /// `‖φ‖₂ ‖u0‖₂`
    pub norm_product: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimeSummary {
    pub t: f64,
    /// `‖mean û - u‖₂` on the profile grid.
    pub profile_l2_error: f64,
    pub statistics: Vec<StatSummary>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompareSummary {
    pub schema_version: u32,
    pub model: String,
    #[serde(rename = "N")]
    pub n: usize,
    pub beta: f64,
    pub v0: f64,
    pub b0: f64,
    pub c0: f64,
    pub shock_time: f64,
    pub block: usize,
    pub replicas: usize,
    pub times: Vec<TimeSummary>,
}

fn mean_stderr(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

/// One flagship cell: statistics against Burgers.
pub fn compare_cell(
    config: &RunConfig,
    n: usize,
    beta: f64,
    cell: u64,
) -> Result<(CompareSummary, Artifacts), Error> {
    let p = prepare(config, n, beta)?;
    let e = &p.experiment;
    let points = burgers_points(config);
    let solutions = burgers_solutions(&e.u0, p.flux.c0, &e.times, points)?;
    let (runs, telemetry) = run_replicas(&p.family, e, p.flux.b0, cell)?;

    let mut statistics_table = CsvTable::new(
        "corollary.csv",
        &["replica", "t", "phi_id", "S_N", "target_integral"],
    );
    let mut times = Vec::with_capacity(e.times.len());
    for (ti, (&t, solution)) in e.times.iter().zip(&solutions).enumerate() {
        let targets: Vec<f64> = e
            .phis
            .iter()
            .map(|(_, phi)| solution.integrate_against(phi))
            .collect();
        for run in &runs {
            for (pi, (id, _)) in e.phis.iter().enumerate() {
                statistics_table.push(vec![
                    run.replica.into(),
                    t.into(),
                    id.as_str().into(),
                    run.snapshots[ti].statistics[pi].into(),
                    targets[pi].into(),
                ])?;
            }
        }
        let statistics = e
            .phis
            .iter()
            .enumerate()
            .map(|(pi, (id, phi))| {
                let values: Vec<f64> = runs
                    .iter()
                    .map(|r| r.snapshots[ti].statistics[pi])
                    .collect();
                let errors: Vec<f64> = values.iter().map(|v| (v - targets[pi]).abs()).collect();
                let (mean, stderr) = mean_stderr(&values);
                let (mean_abs_error, abs_error_stderr) = mean_stderr(&errors);
                StatSummary {
                    phi_id: id.clone(),
                    target_integral: targets[pi],
                    mean,
                    stderr,
                    z_score: if stderr > 0.0 {
                        (mean - targets[pi]) / stderr
                    } else {
                        0.0
                    },
                    mean_abs_error,
                    abs_error_stderr,
                    norm_product: phi.l2_norm() * e.u0.l2_norm(),
                }
            })
            .collect();
        let m = e.grid_points;
        let mean_profile: Vec<f64> = (0..m)
            .map(|i| {
                runs.iter()
                    .map(|r| r.snapshots[ti].profile.values[i])
                    .sum::<f64>()
                    / runs.len() as f64
            })
            .collect();
        let reference = Profile::new(
            (0..m)
                .map(|i| solution.value(i as f64 / m as f64))
                .collect(),
        );
        times.push(TimeSummary {
            t,
            profile_l2_error: Profile::new(mean_profile).l2_distance(&reference),
            statistics,
        });
    }

    let summary = CompareSummary {
        schema_version: SUMMARY_SCHEMA_VERSION,
        model: p.family.model().name().to_string(),
        n,
        beta,
        v0: e.v0,
        b0: p.flux.b0,
        c0: p.flux.c0,
        shock_time: p.shock_time,
        block: e.block,
        replicas: e.replicas,
        times,
    };

    let mut artifacts = Artifacts::new();
    artifacts.tables.push(statistics_table);
    artifacts.tables.push(density_table(&runs)?);
    artifacts.tables.push(burgers_table(&e.times, &solutions)?);
    artifacts.add_json("summary.json", &summary)?;
    artifacts.add_json("events.json", &events_summary(&p, &telemetry))?;
    let mut manifest = RunManifest::new("compare", config);
    manifest.cells.push(cell_seeds(&p, cell));
    manifest.telemetry = Some(Telemetry {
        total_events: telemetry.total_events,
        wall_seconds: telemetry.wall_seconds,
    });
    artifacts.add_json("manifest.json", &manifest)?;

    let mut report = format!(
        "N = {n}, beta = {beta}, T* = {:.6}; {}",
        p.shock_time,
        window_note(&p)
    );
    for ts in &summary.times {
        report.push_str(&format!(
            "\n  t = {}: profile L2 error {:.4}",
            ts.t, ts.profile_l2_error
        ));
        for s in &ts.statistics {
            report.push_str(&format!(
                "\n    {}: mean S_N {:.5} +- {:.5}, target {:.5}, z {:+.2}, mean |err| {:.5}",
                s.phi_id, s.mean, s.stderr, s.target_integral, s.z_score, s.mean_abs_error
            ));
        }
    }
    artifacts.report = report;
    Ok((summary, artifacts))
}

/// Flagship experiment for a single `(N, β)`.
pub fn compare(config: &RunConfig) -> Result<Artifacts, Error> {
    let (n, beta) = single_cell(config, "compare")?;
    Ok(compare_cell(config, n, beta, 0)?.1)
}

/// Cartesian product over the listed `N` and `β`, one `compare` per cell.
pub fn sweep(config: &RunConfig) -> Result<(Vec<CompareSummary>, Artifacts), Error> {
    let lists = [
        config.n.as_ref().map(|v| (v.is_list(), v.values().len())),
        config
            .beta
            .as_ref()
            .map(|v| (v.is_list(), v.values().len())),
    ];
    if lists.iter().flatten().all(|(is_list, _)| !is_list) {
        return Err(Error::Config("sweep needs N or beta to be a list".into()));
    }
    if let Some((_, len)) = lists
        .iter()
        .flatten()
        .find(|(is_list, len)| *is_list && *len < 2)
    {
        return Err(Error::Config(format!(
            "sweep lists need at least two entries, got {len}"
        )));
    }
    let mut summaries = Vec::new();
    let mut artifacts = Artifacts::new();
    let mut table = CsvTable::new(
        "sweep_summary.csv",
        &[
            "cell",
            "N",
            "beta",
            "t",
            "phi_id",
            "mean_abs_error",
            "abs_error_stderr",
            "mean_statistic",
            "target_integral",
            "z_score",
            "profile_l2_error",
        ],
    );
    let mut manifest = RunManifest::new("sweep", config);
    let start = Instant::now();
    let mut total_events = 0;
    let mut cell = 0u64;
    let mut report = String::new();
    for &n in &config.ns() {
        for &beta in &config.betas() {
            let (summary, child) = compare_cell(config, n, beta, cell)?;
            for ts in &summary.times {
                for s in &ts.statistics {
                    table.push(vec![
                        (cell as usize).into(),
                        n.into(),
                        beta.into(),
                        ts.t.into(),
                        s.phi_id.as_str().into(),
                        s.mean_abs_error.into(),
                        s.abs_error_stderr.into(),
                        s.mean.into(),
                        s.target_integral.into(),
                        s.z_score.into(),
                        ts.profile_l2_error.into(),
                    ])?;
                }
            }
            if let Some(events) = child.json_value("events.json") {
                total_events += events["total_events"].as_u64().unwrap_or(0);
            }
            let p = prepare(config, n, beta)?;
            manifest.cells.push(cell_seeds(&p, cell));
            report.push_str(&format!("cell {cell}: {}\n", child.report));
            artifacts.children.push((format!("cell-{cell:02}"), child));
            summaries.push(summary);
            cell += 1;
        }
    }
    manifest.telemetry = Some(Telemetry {
        total_events,
        wall_seconds: start.elapsed().as_secs_f64(),
    });
    artifacts.tables.push(table);
    artifacts.add_json("manifest.json", &manifest)?;
    artifacts.report = report.trim_end().to_string();
    Ok((summaries, artifacts))
}

/// Spectral gaps of every sector; `gap.csv`.
pub fn gap(config: &RunConfig) -> Result<(Vec<GapRow>, Artifacts), Error> {
    let family = family(config)?;
    let spec = config.gap.clone().unwrap_or(config::GapSpec {
        lengths: (2..=8).collect(),
        clip: None,
    });
    let rows = gap_sweep(&family, &spec.lengths, spec.clip.map(|[a, b]| (a, b)))?;
    let mut table = CsvTable::new(
        "gap.csv",
        &["model", "l", "k", "sector_size", "gap", "gap_times_l2"],
    );
    for row in rows.iter().filter(|r| r.gap.is_finite()) {
        table.push(vec![
            row.model.as_str().into(),
            row.l.into(),
            row.k.into(),
            row.sector_size.into(),
            row.gap.into(),
            row.gap_times_l2.into(),
        ])?;
    }
    let mut report = String::new();
    for &l in &spec.lengths {
        let worst = rows
            .iter()
            .filter(|r| r.l == l)
            .map(|r| r.gap_times_l2)
            .fold(f64::INFINITY, f64::min);
        let stationarity = rows
            .iter()
            .filter(|r| r.l == l)
            .map(|r| r.stationarity)
            .fold(0.0, f64::max);
        let sym = rows
            .iter()
            .filter(|r| r.l == l)
            .map(|r| r.sym_stationarity)
            .fold(0.0, f64::max);
        report.push_str(&format!(
            "l = {l}: min gap*l^2 = {worst:.6}; max |pi L| = {stationarity:.3e}; max |pi Sym| = {sym:.3e}\n"
        ));
    }
    let mut artifacts = Artifacts::new();
    artifacts.tables.push(table);
    artifacts.report = report.trim_end().to_string();
    Ok((rows, artifacts))
}

/// Canonical against grand-canonical expectations; `ensembles.csv`.
pub fn ensembles(config: &RunConfig) -> Result<(EnsembleSweep, Artifacts), Error> {
    let family = family(config)?;
    let spec = config.ensembles.clone().unwrap_or(config::EnsemblesSpec {
        density: 0.5,
        lengths: vec![2, 4, 6, 8],
        psi: None,
    });
    let psi = match spec.psi.as_deref().unwrap_or("flux") {
        "flux" => Cylinder::Flux,
        "z" => Cylinder::Spin,
        other => return Err(Error::Config(format!("unknown psi {other:?} (flux, z)"))),
    };
    let sweep = equivalence_sweep(&family, &psi, spec.density, &spec.lengths)?;
    let mut table = CsvTable::new(
        "ensembles.csv",
        &["model", "l", "density", "psi", "abs_error", "fitted_slope"],
    );
    for p in &sweep.points {
        table.push(vec![
            family.model().name().into(),
            p.l.into(),
            p.density.into(),
            psi.label().into(),
            p.abs_error.into(),
            sweep.fitted_slope.into(),
        ])?;
    }
    let mut artifacts = Artifacts::new();
    artifacts.tables.push(table);
    artifacts.report = format!("fitted log-log slope {:.4}", sweep.fitted_slope);
    Ok((sweep, artifacts))
}

/// Exponential block-moment probe; `kurschak.csv`.
pub fn kurschak(config: &RunConfig) -> Result<(Vec<KurschakEstimate>, Artifacts), Error> {
    let spec = config.kurschak.clone().unwrap_or(config::KurschakConfig {
        gamma: 0.3,
        lengths: vec![64, 256, 1024],
        samples: 1_000_000,
    });
    let probe = KurschakSpec::rademacher_cap(spec.gamma);
    let estimates = spec
        .lengths
        .iter()
        .map(|&l| kurschak_probe(&probe, l, spec.samples, config.seed()))
        .collect::<Result<Vec<_>, _>>()?;
    let mut table = CsvTable::new(
        "kurschak.csv",
        &["l", "gamma", "estimate", "stderr", "limit_formula"],
    );
    let mut report = String::new();
    for e in &estimates {
        table.push(vec![
            e.l.into(),
            e.gamma.into(),
            e.estimate.into(),
            e.stderr.into(),
            e.limit.into(),
        ])?;
        report.push_str(&format!(
            "l = {}: {:.5} +- {:.5} (limit {:.5})\n",
            e.l, e.estimate, e.stderr, e.limit
        ));
    }
    let mut artifacts = Artifacts::new();
    artifacts.tables.push(table);
    artifacts.report = report.trim_end().to_string();
    Ok((estimates, artifacts))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::HashSet;

    #[test]
    fn seed_plan_is_injective_and_stable() {
        assert_ne!(seed_plan(7, 0, 0), seed_plan(7, 1, 0));
        assert_eq!(seed_plan(7, 3, 2), seed_plan(7, 3, 2));
        let mut seen = HashSet::new();
        for cell in 0..1000u64 {
            for replica in 0..1000u64 {
                assert!(seen.insert(seed_plan(7, replica, cell)));
            }
        }
    }

    #[test]
    fn streams_differ() {
        use rand::Rng;
        let a: u64 = seed_plan(1, 0, 0).rng().random();
        let b: u64 = seed_plan(1, 1, 0).rng().random();
        let c: u64 = seed_plan(1, 0, 0).rng().random();
        assert_ne!(a, b);
        assert_eq!(a, c);
    }

    #[test]
    fn compare_refuses_horizon_past_shock() {
        let config = RunConfig::from_toml("times = [0.02, 0.16]\nreplicas = 1\nN = 1000").unwrap();
        let err = compare(&config).unwrap_err().to_string();
        assert!(err.contains("0.159"), "{err}");
    }

    #[test]
    fn sweep_rejects_singletons() {
        let config = RunConfig::from_toml("N = [1000]").unwrap();
        assert!(sweep(&config).is_err());
        let config = RunConfig::from_toml("N = 1000").unwrap();
        assert!(sweep(&config).is_err());
    }

    #[test]
    fn flux_table_for_tasep() {
        let (curve, artifacts) = flux(&RunConfig::default()).unwrap();
        assert_eq!(curve.samples.len(), 21);
        let table = artifacts.table("flux.csv").unwrap();
        assert_eq!(table.header(), ["v", "flux_hat", "b", "c"]);
        assert_eq!(table.rows().len(), 21);
    }

    #[test]
    fn small_compare_is_deterministic() {
        let config =
            RunConfig::from_toml("N = 256\nreplicas = 3\ngrid = 16\ntimes = [0.0, 0.02]").unwrap();
        let a = compare(&config).unwrap();
        let b = compare(&config).unwrap();
        for name in ["corollary.csv", "density_profile.csv", "burgers.csv"] {
            assert_eq!(
                a.table(name).unwrap().to_bytes().unwrap(),
                b.table(name).unwrap().to_bytes().unwrap()
            );
        }
        assert_eq!(a.json_value("summary.json"), b.json_value("summary.json"));
    }
}
