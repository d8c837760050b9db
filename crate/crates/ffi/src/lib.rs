//! C interface to the misanthrope simulator.
//!
//! Objects are opaque handles created by `mh_*_new` style functions and
//! released with the matching `mh_*_free`. Every fallible call returns an
//! [`MhStatus`]; on failure a message is available from [`mh_last_error`]
//! until the next failing call on the same thread.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use misanthrope::equilibrium::DEFAULT_EPS_TAIL;
use misanthrope::experiment::config::RunConfig;
use misanthrope::experiment::seed_plan;
use misanthrope::model::validate_conditions;
use misanthrope::simulate::{sample_initial, Configuration, Trajectory};
use misanthrope::{burgers, catalog, Catalog, EquilibriumFamily, RFamily, RateModel, TrigPoly};
use rand_chacha::ChaCha8Rng;

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MhStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidUtf8 = 2,
    InvalidArgument = 3,
    Model = 4,
    Equilibrium = 5,
    Simulation = 6,
    Burgers = 7,
    Config = 8,
    Panic = 9,
}

/// Flux `Φ̂(v0)` and its first two derivatives.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct MhFluxDerivatives {
    pub a0: f64,
    pub b0: f64,
    pub c0: f64,
}

pub struct MhModel(RateModel);

pub struct MhFamily(EquilibriumFamily);

pub struct MhSimulation {
    trajectory: Trajectory,
    rng: ChaCha8Rng,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

struct Failure(MhStatus, String);

impl From<misanthrope::Error> for Failure {
    fn from(e: misanthrope::Error) -> Self {
        use misanthrope::Error as E;
        let status = match &e {
            E::Model(_) => MhStatus::Model,
            E::Equilibrium(_) => MhStatus::Equilibrium,
            E::Simulation(_) => MhStatus::Simulation,
            E::Burgers(_) => MhStatus::Burgers,
            E::Config(_) | E::Io { .. } | E::Csv(_) | E::Json(_) => MhStatus::Config,
            _ => MhStatus::InvalidArgument,
        };
        Failure(status, e.to_string())
    }
}

macro_rules! impl_failure {
    ($($t:ty),*) => {$(
        impl From<$t> for Failure {
            fn from(e: $t) -> Self {
                misanthrope::Error::from(e).into()
            }
        }
    )*};
}

impl_failure!(
    misanthrope::model::ModelError,
    misanthrope::equilibrium::EquilibriumError,
    misanthrope::simulate::SimError,
    misanthrope::burgers::BurgersError
);

fn set_error(message: String) {
    let text = CString::new(message.replace('\0', " ")).expect("nul bytes removed");
    LAST_ERROR.with(|slot| *slot.borrow_mut() = Some(text));
}

fn guard(body: impl FnOnce() -> Result<(), Failure>) -> MhStatus {
    match catch_unwind(AssertUnwindSafe(body)) {
        Ok(Ok(())) => MhStatus::Ok,
        Ok(Err(Failure(status, message))) => {
            set_error(message);
            status
        }
        Err(_) => {
            set_error("internal panic".to_string());
            MhStatus::Panic
        }
    }
}

fn null(what: &str) -> Failure {
    Failure(MhStatus::NullPointer, format!("{what} is null"))
}

unsafe fn deref<'a, T>(p: *const T, what: &str) -> Result<&'a T, Failure> {
    p.as_ref().ok_or_else(|| null(what))
}

unsafe fn write_out<T>(out: *mut T, value: T) -> Result<(), Failure> {
    if out.is_null() {
        return Err(null("output pointer"));
    }
    out.write(value);
    Ok(())
}

unsafe fn boxed_out<T>(out: *mut *mut T, value: T) -> Result<(), Failure> {
    write_out(out, Box::into_raw(Box::new(value)))
}

/// Message of the last failure on this thread, or null. The pointer stays
/// valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn mh_last_error() -> *const c_char {
    LAST_ERROR.with(|slot| slot.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}

#[no_mangle]
pub extern "C" fn mh_clear_error() {
    LAST_ERROR.with(|slot| *slot.borrow_mut() = None);
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn mh_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Totally asymmetric simple exclusion.
///
/// # Safety
/// `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn mh_model_tasep(out: *mut *mut MhModel) -> MhStatus {
    guard(|| boxed_out(out, MhModel(catalog(&Catalog::Tasep)?)))
}

/// Exclusion with at most `k` units per site and `α(x) = x`.
///
/// # Safety
/// `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn mh_model_k_exclusion(k: i64, out: *mut *mut MhModel) -> MhStatus {
    guard(|| {
        boxed_out(
            out,
            MhModel(catalog(&Catalog::KExclusion { k, alpha: None })?),
        )
    })
}

/// Zero-range with `r(x) = x`.
///
/// # Safety
/// `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn mh_model_zero_range_linear(out: *mut *mut MhModel) -> MhStatus {
    guard(|| boxed_out(out, MhModel(catalog(&Catalog::ZeroRange(RFamily::Linear))?)))
}

/// Bricklayers with `r(x) = x` on the positive side.
///
/// # Safety
/// `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn mh_model_bricklayers_linear(out: *mut *mut MhModel) -> MhStatus {
    guard(|| {
        boxed_out(
            out,
            MhModel(catalog(&Catalog::Bricklayers(RFamily::Linear))?),
        )
    })
}

/// Model from the `[model]` table of a run configuration given as TOML text.
///
/// # Safety
/// `toml` must be a NUL-terminated string and `out` valid for writes.
#[no_mangle]
pub unsafe extern "C" fn mh_model_from_toml(
    toml: *const c_char,
    out: *mut *mut MhModel,
) -> MhStatus {
    guard(|| {
        if toml.is_null() {
            return Err(null("toml"));
        }
        let text = CStr::from_ptr(toml)
            .to_str()
            .map_err(|e| Failure(MhStatus::InvalidUtf8, e.to_string()))?;
        let config = RunConfig::from_toml(text)?;
        boxed_out(out, MhModel(config.model.build()?))
    })
}

/// Checks the structural conditions on `[-window, window]` (clipped to the
/// spin range). `passed` receives whether every required check holds.
///
/// # Safety
/// `model` must come from a model constructor; `passed` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn mh_model_validate(
    model: *const MhModel,
    window: i64,
    passed: *mut bool,
) -> MhStatus {
    guard(|| {
        let model = deref(model, "model")?;
        let report = validate_conditions(&model.0, window)?;
        write_out(passed, report.all_passed())
    })
}

/// Rate of one unit moving from a site holding `x` to a neighbour holding `y`.
///
/// # Safety
/// `model` must come from a model constructor; `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn mh_model_rate(
    model: *const MhModel,
    x: i64,
    y: i64,
    out: *mut f64,
) -> MhStatus {
    guard(|| {
        let model = deref(model, "model")?;
        let b = model.0.bounds();
        if !(b.contains(x) && b.contains(y)) {
            return Err(Failure(
                MhStatus::InvalidArgument,
                format!("spins ({x}, {y}) outside the spin range"),
            ));
        }
        write_out(out, model.0.rate(x, y))
    })
}

/// # Safety
/// `model` must be null or come from a model constructor, and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn mh_model_free(model: *mut MhModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

/// Stationary product family of `model`.
///
/// # Safety
/// `model` must come from a model constructor; `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn mh_family_new(model: *const MhModel, out: *mut *mut MhFamily) -> MhStatus {
    guard(|| {
        let model = deref(model, "model")?;
        boxed_out(
            out,
            MhFamily(EquilibriumFamily::build(&model.0, DEFAULT_EPS_TAIL)?),
        )
    })
}

/// Attainable densities `(lo, hi)`.
///
/// # Safety
/// `family` must come from [`mh_family_new`]; `lo` and `hi` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn mh_family_density_range(
    family: *const MhFamily,
    lo: *mut f64,
    hi: *mut f64,
) -> MhStatus {
    guard(|| {
        let (a, b) = deref(family, "family")?.0.density_range();
        write_out(lo, a)?;
        write_out(hi, b)
    })
}

/// Tilt with mean `v`.
///
/// # Safety
/// `family` must come from [`mh_family_new`]; `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn mh_family_theta_of_v(
    family: *const MhFamily,
    v: f64,
    out: *mut f64,
) -> MhStatus {
    guard(|| write_out(out, deref(family, "family")?.0.theta_of_v(v)?))
}

/// Mean of the family at tilt `theta`.
///
/// # Safety
/// `family` must come from [`mh_family_new`]; `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn mh_family_density(
    family: *const MhFamily,
    theta: f64,
    out: *mut f64,
) -> MhStatus {
    guard(|| write_out(out, deref(family, "family")?.0.density(theta)?))
}

/// Equilibrium flux at density `v`.
///
/// # Safety
/// `family` must come from [`mh_family_new`]; `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn mh_family_flux_hat(
    family: *const MhFamily,
    v: f64,
    out: *mut f64,
) -> MhStatus {
    guard(|| write_out(out, deref(family, "family")?.0.flux_hat(v)?))
}

/// # Safety
/// `family` must come from [`mh_family_new`]; `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn mh_family_flux_derivatives(
    family: *const MhFamily,
    v0: f64,
    out: *mut MhFluxDerivatives,
) -> MhStatus {
    guard(|| {
        let d = deref(family, "family")?.0.flux_derivatives(v0, None)?;
        write_out(
            out,
            MhFluxDerivatives {
                a0: d.a0,
                b0: d.b0,
                c0: d.c0,
            },
        )
    })
}

/// # Safety
/// `family` must be null or come from [`mh_family_new`], and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn mh_family_free(family: *mut MhFamily) {
    if !family.is_null() {
        drop(Box::from_raw(family));
    }
}

unsafe fn trig_poly(sin: *const f64, cos: *const f64, modes: usize) -> Result<TrigPoly, Failure> {
    let mut u = TrigPoly::constant(0.0);
    for (coeffs, is_sin) in [(sin, true), (cos, false)] {
        if coeffs.is_null() {
            continue;
        }
        for (i, &a) in std::slice::from_raw_parts(coeffs, modes).iter().enumerate() {
            if !a.is_finite() {
                return Err(Failure(
                    MhStatus::InvalidArgument,
                    format!("coefficient {a} of mode {}", i + 1),
                ));
            }
            if is_sin {
                u.set_sin(i + 1, a);
            } else {
                u.set_cos(i + 1, a);
            }
        }
    }
    Ok(u)
}

/// First shock time of Burgers' equation `u_t + c0 u u_x = 0` from
/// `u0(x) = Σ_m sin[m-1] sin(2πmx) + cos[m-1] cos(2πmx)`; `+inf` if none.
/// Either coefficient array may be null.
///
/// # Safety
/// Non-null `sin` and `cos` must point to `modes` doubles; `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn mh_shock_time(
    sin: *const f64,
    cos: *const f64,
    modes: usize,
    c0: f64,
    out: *mut f64,
) -> MhStatus {
    guard(|| {
        if modes > misanthrope::trig::MAX_TEST_DEGREE {
            return Err(Failure(
                MhStatus::InvalidArgument,
                format!("{modes} modes exceed the maximum degree"),
            ));
        }
        let u0 = trig_poly(sin, cos, modes)?;
        write_out(out, burgers::shock_time(&u0, c0))
    })
}

/// Simulation on a ring starting from `spins[0..n]`.
///
/// # Safety
/// `model` must come from a model constructor, `spins` must point to `n`
/// values and `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn mh_simulation_new(
    model: *const MhModel,
    spins: *const i64,
    n: usize,
    seed: u64,
    out: *mut *mut MhSimulation,
) -> MhStatus {
    guard(|| {
        let model = deref(model, "model")?;
        if spins.is_null() {
            return Err(null("spins"));
        }
        let config = Configuration::new(std::slice::from_raw_parts(spins, n).to_vec());
        let trajectory = Trajectory::new(&model.0, config)?;
        boxed_out(
            out,
            MhSimulation {
                trajectory,
                rng: seed_plan(seed, 0, 0).rng(),
            },
        )
    })
}

/// Simulation on `n` sites started from the product measure with density
/// `v0 + n^{-beta} amplitude sin(2πx)`.
///
/// # Safety
/// `family` must come from [`mh_family_new`]; `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn mh_simulation_sample(
    family: *const MhFamily,
    n: usize,
    v0: f64,
    amplitude: f64,
    beta: f64,
    seed: u64,
    out: *mut *mut MhSimulation,
) -> MhStatus {
    guard(|| {
        let family = deref(family, "family")?;
        let mut rng = seed_plan(seed, 0, 0).rng();
        let u0 = TrigPoly::sine(amplitude, 1);
        let config = sample_initial(&family.0, n, beta, v0, &u0, &mut rng)?;
        let trajectory = Trajectory::new(family.0.model(), config)?;
        boxed_out(out, MhSimulation { trajectory, rng })
    })
}

/// Advances to micro-time `target`.
///
/// # Safety
/// `sim` must come from a simulation constructor.
#[no_mangle]
pub unsafe extern "C" fn mh_simulation_run_until(sim: *mut MhSimulation, target: f64) -> MhStatus {
    guard(|| {
        let sim = sim.as_mut().ok_or_else(|| null("simulation"))?;
        sim.trajectory.run_until(target, &mut sim.rng)?;
        Ok(())
    })
}

/// Number of sites.
///
/// # Safety
/// `sim` must come from a simulation constructor; `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn mh_simulation_len(sim: *const MhSimulation, out: *mut usize) -> MhStatus {
    guard(|| write_out(out, deref(sim, "simulation")?.trajectory.config().len()))
}

/// Copies the current spins into `buf`, which must hold `len` values with
/// `len` equal to the number of sites.
///
/// # Safety
/// `sim` must come from a simulation constructor; `buf` must be valid for `len` writes.
#[no_mangle]
pub unsafe extern "C" fn mh_simulation_spins(
    sim: *const MhSimulation,
    buf: *mut i64,
    len: usize,
) -> MhStatus {
    guard(|| {
        let spins = &deref(sim, "simulation")?.trajectory.config().spins;
        if buf.is_null() {
            return Err(null("buf"));
        }
        if len != spins.len() {
            return Err(Failure(
                MhStatus::InvalidArgument,
                format!("buffer holds {len} values, ring has {}", spins.len()),
            ));
        }
        ptr::copy_nonoverlapping(spins.as_ptr(), buf, len);
        Ok(())
    })
}

/// # Safety
/// `sim` must come from a simulation constructor; `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn mh_simulation_time(sim: *const MhSimulation, out: *mut f64) -> MhStatus {
    guard(|| {
        write_out(
            out,
            deref(sim, "simulation")?.trajectory.config().micro_time,
        )
    })
}

/// Jumps performed so far.
///
/// # Safety
/// `sim` must come from a simulation constructor; `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn mh_simulation_events(sim: *const MhSimulation, out: *mut u64) -> MhStatus {
    guard(|| write_out(out, deref(sim, "simulation")?.trajectory.events()))
}

/// # Safety
/// `sim` must be null or come from a simulation constructor, and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn mh_simulation_free(sim: *mut MhSimulation) {
    if !sim.is_null() {
        drop(Box::from_raw(sim));
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn panics_become_a_status() {
        let status = guard(|| panic!("boom"));
        assert_eq!(status, MhStatus::Panic);
        let message = unsafe { CStr::from_ptr(mh_last_error()) };
        assert_eq!(message.to_str().unwrap(), "internal panic");
    }

    #[test]
    fn version_is_nul_terminated() {
        let v = unsafe { CStr::from_ptr(mh_version()) };
        assert_eq!(v.to_str().unwrap(), env!("CARGO_PKG_VERSION"));
    }
}
