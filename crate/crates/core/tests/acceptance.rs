//! Acceptance criteria at their pinned tolerances. Prints one PASS/FAIL line
//! per criterion and exits non-zero if any fails.

use std::process::ExitCode;
use std::time::Instant;

use misanthrope::blockstats::{entropy_between_profiles, kurschak_probe, KurschakSpec};
use misanthrope::equilibrium::DEFAULT_EPS_TAIL;
use misanthrope::experiment::{compare_cell, config::RunConfig};
use misanthrope::simulate::{run_until, sample_initial};
use misanthrope::spectral::{
    check_gap_perturbation, check_sector_decomposition, enumerate_sector, equivalence_sweep,
    gap_sweep, log_log_slope, Cylinder,
};
use misanthrope::{catalog, Catalog, EquilibriumFamily, RFamily, TrigPoly};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = Result<(bool, String), Box<dyn std::error::Error>>;
type Criterion = (&'static str, fn() -> Outcome);

fn family(entry: Catalog) -> EquilibriumFamily {
    EquilibriumFamily::build(&catalog(&entry).unwrap(), DEFAULT_EPS_TAIL).unwrap()
}

fn catalog_models() -> Vec<Catalog> {
    vec![
        Catalog::Tasep,
        Catalog::KExclusion { k: 2, alpha: None },
        Catalog::ZeroRange(RFamily::Linear),
        Catalog::Bricklayers(RFamily::Linear),
    ]
}

fn flagship() -> Outcome {
    let config = RunConfig::default();
    let sizes = [1000, 2000, 4000];
    let mut summaries = Vec::new();
    for (cell, &n) in sizes.iter().enumerate() {
        summaries.push(compare_cell(&config, n, config.betas()[0], cell as u64)?.0);
    }
    let mut ok = true;
    let mut worst_step = f64::NEG_INFINITY;
    let mut worst_cap: f64 = 0.0;
    let times = summaries[0].times.len();
    for ti in 0..times {
        for si in 0..summaries[0].times[ti].statistics.len() {
            let series: Vec<_> = summaries
                .iter()
                .map(|s| &s.times[ti].statistics[si])
                .collect();
            for w in series.windows(2) {
                let slack =
                    3.0 * (w[0].abs_error_stderr.powi(2) + w[1].abs_error_stderr.powi(2)).sqrt();
                let step = (w[1].mean_abs_error - w[0].mean_abs_error) / slack;
                worst_step = worst_step.max(step);
                ok &= step <= 1.0;
            }
            let last = series[series.len() - 1];
            let ratio = last.mean_abs_error / (0.1 * last.norm_product);
            worst_cap = worst_cap.max(ratio);
            ok &= ratio < 1.0;
        }
    }
    Ok((
        ok,
        format!("largest increase in N = {worst_step:.3} x 3 SE (needs <= 1); N = 4000 error / cap <= {worst_cap:.3} (needs < 1)"),
    ))
}

fn flux_oracles() -> Outcome {
    let tasep = family(Catalog::Tasep);
    let zr = family(Catalog::ZeroRange(RFamily::Linear));
    let mut err: f64 = 0.0;
    for i in 0..21 {
        let v = i as f64 / 20.0;
        err = err.max((tasep.flux_hat(v)? - v * (1.0 - v)).abs());
    }
    for v in zr.density_grid(21) {
        err = err.max((zr.flux_hat(v)? - v).abs());
    }
    let d = tasep.flux_derivatives(0.5, None)?;
    let dev = (d.a0 - 0.25).abs().max(d.b0.abs()).max((d.c0 + 2.0).abs());
    Ok((
        err <= 1e-10 && dev <= 1e-6,
        format!("max flux error {err:.2e} (<= 1e-10); (a0, b0, c0) off by {dev:.2e} (<= 1e-6)"),
    ))
}

fn round_trip() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(101);
    let mut worst: f64 = 0.0;
    for entry in catalog_models() {
        let f = family(entry);
        let grid = f.density_grid(2);
        let (lo, hi) = (
            grid[0] - (grid[1] - grid[0]) * 0.99,
            grid[1] + (grid[1] - grid[0]) * 0.99,
        );
        for _ in 0..100 {
            let v = rng.random_range(lo..hi);
            worst = worst.max((f.density(f.theta_of_v(v)?)? - v).abs());
        }
    }
    Ok((
        worst <= 1e-12,
        format!("max |v(theta(v)) - v| = {worst:.2e} (<= 1e-12)"),
    ))
}

fn entropy_expansion() -> Outcome {
    let f = family(Catalog::Tasep);
    let beta = 0.15;
    let (u1, u2) = (TrigPoly::constant(0.0), TrigPoly::sine(0.3, 1));
    let mut points = Vec::new();
    let mut ratios = Vec::new();
    for n in [1_000usize, 10_000, 100_000] {
        let e = entropy_between_profiles(&f, n, beta, 0.5, &u1, &u2)?;
        let residual = (e.exact - e.expansion).abs();
        points.push(((n as f64).ln(), residual.ln()));
        ratios.push(residual / (n as f64).powf(1.0 - 3.0 * beta));
    }
    let slope = log_log_slope(&points).unwrap_or(f64::NAN);
    let target = 1.0 - 3.0 * beta;
    Ok((
        (target - 0.15..=target + 0.15).contains(&slope),
        format!(
            "residual exponent {slope:.4} (needs [{:.2}, {:.2}]); residual / N^(1-3b) = {:.3e}, {:.3e}, {:.3e}",
            target - 0.15,
            target + 0.15,
            ratios[0],
            ratios[1],
            ratios[2]
        ),
    ))
}

fn kurschak() -> Outcome {
    let spec = KurschakSpec::rademacher_cap(0.3);
    let limit = spec.limit()?;
    let mut ok = true;
    let mut parts = Vec::new();
    let mut last = None;
    for (i, l) in [64usize, 256, 1024].into_iter().enumerate() {
        let e = kurschak_probe(&spec, l, 1_000_000, 7 + i as u64)?;
        ok &= e.estimate <= 1.8;
        parts.push(format!("l = {l}: {:.4} +- {:.4}", e.estimate, e.stderr));
        last = Some(e);
    }
    let e = last.unwrap();
    let z = (e.estimate - limit) / e.stderr;
    ok &= z.abs() <= 3.0;
    Ok((
        ok,
        format!("{}; limit {limit:.4}, z = {z:+.2}", parts.join(", ")),
    ))
}

fn gap_sweep_criterion() -> Outcome {
    let mut ok = true;
    let mut lines = Vec::new();
    for entry in [Catalog::Tasep, Catalog::KExclusion { k: 2, alpha: None }] {
        let f = family(entry);
        let lengths: Vec<usize> = (2..=8).collect();
        let rows = gap_sweep(&f, &lengths, None)?;
        let stationarity = rows.iter().map(|r| r.stationarity).fold(0.0, f64::max);
        let sym = rows.iter().map(|r| r.sym_stationarity).fold(0.0, f64::max);
        let positive = rows.iter().all(|r| r.gap > 0.0);
        let worst = |l: usize| {
            rows.iter()
                .filter(|r| r.l == l && r.gap.is_finite())
                .map(|r| r.gap_times_l2)
                .fold(f64::INFINITY, f64::min)
        };
        let base = worst(2);
        let scaled = lengths
            .iter()
            .map(|&l| worst(l) / base)
            .fold(f64::INFINITY, f64::min);
        ok &= stationarity <= 1e-12 && positive && scaled >= 0.5;
        lines.push(format!(
            "{}: max |pi L| = {stationarity:.2e} (<= 1e-12), max |pi Sym| = {sym:.2e}, gaps positive = {positive}, min gap l^2 / l=2 worst = {scaled:.3} (>= 0.5)",
            f.model().name()
        ));
    }
    Ok((ok, lines.join("; ")))
}

fn gap_perturbation() -> Outcome {
    let f = family(Catalog::KExclusion { k: 2, alpha: None });
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let (mut checked, mut violations) = (0, 0);
    let mut worst = f64::NEG_INFINITY;
    for k in 0..=8 {
        let e = enumerate_sector(&f, 4, k, None)?;
        if e.len() < 2 {
            continue;
        }
        for _ in 0..100 {
            let v: Vec<f64> = (0..e.len()).map(|_| rng.random_range(-1.0..1.0)).collect();
            let probe = check_gap_perturbation(&e, &v, 1e-9)?;
            let r = check_gap_perturbation(&e, &v, 0.5 * probe.eps_bound)?;
            checked += 1;
            if !r.holds() {
                violations += 1;
            }
            worst = worst.max(r.lhs - r.rhs);
        }
    }
    Ok((
        violations == 0,
        format!("{checked} potentials, {violations} violations, max lhs - rhs = {worst:.3e}"),
    ))
}

fn ensembles() -> Outcome {
    let f = family(Catalog::Tasep);
    let sweep = equivalence_sweep(&f, &Cylinder::Flux, 0.5, &[2, 4, 6, 8])?;
    let errors: Vec<String> = sweep
        .points
        .iter()
        .map(|p| format!("{:.4}", p.abs_error))
        .collect();
    Ok((
        (-1.4..=-0.6).contains(&sweep.fitted_slope),
        format!(
            "slope {:.4} (needs [-1.4, -0.6]); errors {}",
            sweep.fitted_slope,
            errors.join(", ")
        ),
    ))
}

fn dirichlet_identities() -> Outcome {
    let r = check_sector_decomposition(&family(Catalog::Tasep), 4, 2, 50, 99)?;
    Ok((
        r.max_identity_violation <= 1e-10 && r.convex_violations == 0,
        format!(
            "identity violation {:.2e} (<= 1e-10), convexity violations {} over {} densities, min margin {:.3e}",
            r.max_identity_violation, r.convex_violations, r.trials, r.min_convex_margin
        ),
    ))
}

fn stationarity() -> Outcome {
    let f = family(Catalog::Tasep);
    let n = 10_000usize;
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    let start = sample_initial(&f, n, 0.15, 0.5, &TrigPoly::constant(0.0), &mut rng)?;
    let end = run_until(start, f.model(), 1000.0, &mut rng)?;
    let nf = n as f64;
    let mean = end.total() as f64 / nf;
    let mut worst = (mean - 0.5).abs() / (0.25 / nf).sqrt();
    for (a, b) in [(0, 0), (0, 1), (1, 0), (1, 1)] {
        let count = (0..n)
            .filter(|&j| end.spins[j] == a && end.spins[(j + 1) % n] == b)
            .count();
        let q = 0.25;
        // overlapping pairs (a,b),(b,c) both match only when a == b
        let overlap = if a == b { 0.125 } else { 0.0 };
        let se = ((q * (1.0 - q) + 2.0 * (overlap - q * q)) / nf).sqrt();
        worst = worst.max((count as f64 / nf - q).abs() / se);
    }
    Ok((
        worst <= 4.0,
        format!("site mean {mean:.4}; largest deviation {worst:.2} SE (<= 4)"),
    ))
}

fn main() -> ExitCode {
    let criteria: [Criterion; 10] = [
        ("hydrodynamic statistic converges to Burgers", flagship),
        ("flux oracles", flux_oracles),
        ("density and tilt round trip", round_trip),
        ("relative entropy expansion", entropy_expansion),
        ("exponential moment probe", kurschak),
        ("block spectral gaps", gap_sweep_criterion),
        ("gap perturbation bound", gap_perturbation),
        ("equivalence of ensembles", ensembles),
        ("Dirichlet form identities", dirichlet_identities),
        ("product measure stationarity", stationarity),
    ];
    let mut failed = 0;
    for (name, run) in criteria {
        let start = Instant::now();
        let (ok, detail) = match run() {
            Ok(r) => r,
            Err(e) => (false, format!("error: {e}")),
        };
        let secs = start.elapsed().as_secs_f64();
        println!(
            "{} {name}: {detail} [{secs:.1}s]",
            if ok { "PASS" } else { "FAIL" }
        );
        failed += usize::from(!ok);
    }
    println!(
        "{} of {} criteria passed",
        criteria.len() - failed,
        criteria.len()
    );
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
