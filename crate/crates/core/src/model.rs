//! Spin spaces and misanthrope rate functions.
//!
//! A model is a rate `c(x, y)` for moving one unit of spin from a site holding
//! `x` to its right neighbour holding `y`. Three kinds are supported: an
//! explicit finite table (bounded spins), zero range (`c(x, y) = 1{x > 0} r(x)`)
//! and bricklayers (`c(x, y) = r(x) + r(-y)` with `r(z) r(1 - z) = 1`).

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Spin values.
pub type Spin = i64;

const REL_TOL: f64 = 1e-10;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("rate table is empty")]
    EmptyTable,
    #[error("rate table has {got} entries, expected {expected} for |S| = {states}")]
    TableShape {
        got: usize,
        expected: usize,
        states: usize,
    },
    #[error("negative or non-finite rate c({x}, {y}) = {value}")]
    BadRate { x: Spin, y: Spin, value: f64 },
    #[error("invalid spin bounds: {0}")]
    Bounds(String),
    #[error("unbounded spin space requires a zero-range or bricklayers model")]
    UnboundedTable,
    #[error("K must be at least 1, got {0}")]
    InvalidK(i64),
    #[error("invalid r specification: {0}")]
    InvalidR(String),
    #[error("bricklayers constraint r(z) r(1 - z) = 1 violated at z = {z}: {product}")]
    BricklayersConstraint { z: Spin, product: f64 },
    #[error("ratio recursion divides by zero at c({x}, {y}) (non-degeneracy violated)")]
    DivisionByZero { x: Spin, y: Spin },
    #[error(
        "inconsistent rate ratios on the cycle ({x}, {y}, {anchor}): c(x,y-1) r(y) = {lhs} but c(y,x-1) r(x) = {rhs}"
    )]
    InconsistentRatios {
        x: Spin,
        y: Spin,
        anchor: Spin,
        lhs: f64,
        rhs: f64,
    },
}

/// `S = [z_min, z_max] ∩ Z`; `None` stands for an infinite bound.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SpinBounds {
    pub z_min: Option<Spin>,
    pub z_max: Option<Spin>,
}

impl SpinBounds {
    pub fn new(z_min: Option<Spin>, z_max: Option<Spin>) -> Result<Self, ModelError> {
        if let (Some(lo), Some(hi)) = (z_min, z_max) {
            if lo >= hi {
                return Err(ModelError::Bounds(format!(
                    "z_min = {lo} must be < z_max = {hi}"
                )));
            }
        }
        Ok(Self { z_min, z_max })
    }

    pub fn bounded(z_min: Spin, z_max: Spin) -> Result<Self, ModelError> {
        Self::new(Some(z_min), Some(z_max))
    }

    pub fn is_bounded(&self) -> bool {
        self.z_min.is_some() && self.z_max.is_some()
    }

    pub fn contains(&self, z: Spin) -> bool {
        self.z_min.is_none_or(|lo| z >= lo) && self.z_max.is_none_or(|hi| z <= hi)
    }

    /// `S ∩ [-half_width, half_width]`, widened so that finite bounds are always included.
    pub fn window(&self, half_width: Spin) -> (Spin, Spin) {
        let lo = self.z_min.unwrap_or(-half_width);
        let hi = self.z_max.unwrap_or(half_width);
        let lo = if self.z_min.is_some() {
            lo
        } else {
            lo.min(hi - 1)
        };
        let hi = if self.z_max.is_some() {
            hi
        } else {
            hi.max(lo + 1)
        };
        (lo, hi)
    }
}

/// Built-in families for the function `r` on the positive integers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum RFamily {
    /// `r(x) = x`
    Linear,
    /// `r(x) = intercept + slope * x`
    Affine { intercept: f64, slope: f64 },
    /// `r(1), r(2), ...`; extended beyond the table by the last increment (or
    /// constantly if that increment is not positive).
    Table(Vec<f64>),
}

impl RFamily {
    fn check(&self) -> Result<(), ModelError> {
        match self {
            RFamily::Linear => Ok(()),
            RFamily::Affine { intercept, slope } => {
                if !(intercept.is_finite() && slope.is_finite())
                    || *slope < 0.0
                    || intercept + slope <= 0.0
                {
                    Err(ModelError::InvalidR(format!(
                        "affine r needs slope >= 0 and r(1) > 0, got intercept {intercept}, slope {slope}"
                    )))
                } else {
                    Ok(())
                }
            }
            RFamily::Table(values) => {
                if values.is_empty() {
                    return Err(ModelError::InvalidR("empty r table".into()));
                }
                match values.iter().position(|v| !(v.is_finite() && *v > 0.0)) {
                    Some(i) => Err(ModelError::InvalidR(format!(
                        "r({}) = {} is not positive",
                        i + 1,
                        values[i]
                    ))),
                    None => Ok(()),
                }
            }
        }
    }

    /// Value at `x >= 1`.
    pub fn at(&self, x: Spin) -> f64 {
        debug_assert!(x >= 1);
        match self {
            RFamily::Linear => x as f64,
            RFamily::Affine { intercept, slope } => intercept + slope * x as f64,
            RFamily::Table(values) => {
                let n = values.len() as Spin;
                if x <= n {
                    return values[(x - 1) as usize];
                }
                let last = values[values.len() - 1];
                let step = if values.len() >= 2 {
                    last - values[values.len() - 2]
                } else {
                    0.0
                };
                if step > 0.0 {
                    last + step * (x - n) as f64
                } else {
                    last
                }
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum RateKind {
    /// Row-major table over `S x S` for bounded `S`.
    Table(Vec<f64>),
    ZeroRange(RFamily),
    Bricklayers(RFamily),
}

impl RateKind {
    pub fn label(&self) -> &'static str {
        match self {
            RateKind::Table(_) => "generic-table",
            RateKind::ZeroRange(_) => "zero-range",
            RateKind::Bricklayers(_) => "bricklayers",
        }
    }
}

/// A misanthrope rate function on its spin space. Immutable once built.
#[derive(Debug, Clone, PartialEq)]
pub struct RateModel {
    name: String,
    bounds: SpinBounds,
    kind: RateKind,
}

impl fmt::Display for RateModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} ({})", self.name, self.kind.label())
    }
}

impl RateModel {
    /// Explicit table `c(x, y)` for `x, y` in `[z_min, z_max]`, row-major.
    pub fn from_table(
        name: impl Into<String>,
        z_min: Spin,
        z_max: Spin,
        table: Vec<f64>,
    ) -> Result<Self, ModelError> {
        let bounds = SpinBounds::bounded(z_min, z_max)?;
        if table.is_empty() {
            return Err(ModelError::EmptyTable);
        }
        let states = (z_max - z_min + 1) as usize;
        if table.len() != states * states {
            return Err(ModelError::TableShape {
                got: table.len(),
                expected: states * states,
                states,
            });
        }
        for (i, &value) in table.iter().enumerate() {
            if !(value.is_finite() && value >= 0.0) {
                return Err(ModelError::BadRate {
                    x: z_min + (i / states) as Spin,
                    y: z_min + (i % states) as Spin,
                    value,
                });
            }
        }
        Ok(Self {
            name: name.into(),
            bounds,
            kind: RateKind::Table(table),
        })
    }

    /// Zero range model `c(x, y) = 1{x > 0} r(x)` on `S = {0, 1, 2, ...}`.
    pub fn zero_range(name: impl Into<String>, r: RFamily) -> Result<Self, ModelError> {
        r.check()?;
        Ok(Self {
            name: name.into(),
            bounds: SpinBounds::new(Some(0), None)?,
            kind: RateKind::ZeroRange(r),
        })
    }

    /// Bricklayers model from the positive half of `r`; the negative half is
    /// forced by `r(1 - z) = 1 / r(z)`.
    pub fn bricklayers(name: impl Into<String>, r: RFamily) -> Result<Self, ModelError> {
        r.check()?;
        Ok(Self {
            name: name.into(),
            bounds: SpinBounds::new(None, None)?,
            kind: RateKind::Bricklayers(r),
        })
    }

    /// Bricklayers model from explicit values `r(1 - n), ..., r(n)` (starting at
    /// `r(1 - n)`), which must satisfy `r(z) r(1 - z) = 1`.
    pub fn bricklayers_two_sided(
        name: impl Into<String>,
        values: &[f64],
    ) -> Result<Self, ModelError> {
        if values.is_empty() || !values.len().is_multiple_of(2) {
            return Err(ModelError::InvalidR(
                "two-sided bricklayers table needs r(1-n)..r(n), an even number of values".into(),
            ));
        }
        let n = values.len() / 2;
        let at = |z: Spin| values[(z + n as Spin - 1) as usize];
        for z in 1..=n as Spin {
            let product = at(z) * at(1 - z);
            if (product - 1.0).abs() > REL_TOL {
                return Err(ModelError::BricklayersConstraint { z, product });
            }
        }
        Self::bricklayers(name, RFamily::Table(values[n..].to_vec()))
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn renamed(mut self, name: impl Into<String>) -> Self {
        self.name = name.into();
        self
    }

    pub fn bounds(&self) -> SpinBounds {
        self.bounds
    }

    pub fn kind(&self) -> &RateKind {
        &self.kind
    }

    /// `c(x, y)`; zero outside `S x S`.
    #[inline]
    pub fn rate(&self, x: Spin, y: Spin) -> f64 {
        if !self.bounds.contains(x) || !self.bounds.contains(y) {
            return 0.0;
        }
        match &self.kind {
            RateKind::Table(table) => {
                let lo = self.bounds.z_min.unwrap_or_default();
                let states = (self.bounds.z_max.unwrap_or_default() - lo + 1) as usize;
                table[(x - lo) as usize * states + (y - lo) as usize]
            }
            RateKind::ZeroRange(r) => {
                if x > 0 {
                    r.at(x)
                } else {
                    0.0
                }
            }
            RateKind::Bricklayers(r) => bricklayers_r(r, x) + bricklayers_r(r, -y),
        }
    }

    /// The model's own `r` for zero range and bricklayers kinds.
    pub fn native_r(&self, z: Spin) -> Option<f64> {
        match &self.kind {
            RateKind::Table(_) => None,
            RateKind::ZeroRange(r) => Some(if z <= 0 { 0.0 } else { r.at(z) }),
            RateKind::Bricklayers(r) => Some(bricklayers_r(r, z)),
        }
    }
}

#[inline]
fn bricklayers_r(r: &RFamily, z: Spin) -> f64 {
    if z >= 1 {
        r.at(z)
    } else {
        1.0 / r.at(1 - z)
    }
}

/// Built-in models.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Catalog {
    Tasep,
    /// `c(x, y) = alpha(x) (alpha(K) - alpha(y))` with `alpha(0) = 0` and
    /// `alpha(1..=K)` strictly increasing; `None` means `alpha(x) = x`.
    KExclusion {
        k: Spin,
        alpha: Option<Vec<f64>>,
    },
    ZeroRange(RFamily),
    Bricklayers(RFamily),
}

pub fn catalog(entry: &Catalog) -> Result<RateModel, ModelError> {
    match entry {
        Catalog::Tasep => RateModel::from_table("tasep", 0, 1, vec![0.0, 0.0, 1.0, 0.0]),
        Catalog::KExclusion { k, alpha } => k_exclusion(*k, alpha.as_deref()),
        Catalog::ZeroRange(r) => RateModel::zero_range("zero-range", r.clone()),
        Catalog::Bricklayers(r) => RateModel::bricklayers("bricklayers", r.clone()),
    }
}

fn k_exclusion(k: Spin, alpha: Option<&[f64]>) -> Result<RateModel, ModelError> {
    if k < 1 {
        return Err(ModelError::InvalidK(k));
    }
    let mut a = vec![0.0];
    match alpha {
        None => a.extend((1..=k).map(|x| x as f64)),
        Some(values) => {
            if values.len() != k as usize {
                return Err(ModelError::InvalidR(format!(
                    "K-exclusion needs {k} alpha values, got {}",
                    values.len()
                )));
            }
            a.extend_from_slice(values);
        }
    }
    if a.windows(2).any(|w| !(w[1] > w[0]) || !w[1].is_finite()) {
        return Err(ModelError::InvalidR(
            "alpha must be finite and strictly increasing from alpha(0) = 0".into(),
        ));
    }
    let states = (k + 1) as usize;
    let top = a[k as usize];
    let mut table = vec![0.0; states * states];
    for x in 0..states {
        for y in 0..states {
            table[x * states + y] = a[x] * (top - a[y]);
        }
    }
    RateModel::from_table(format!("{k}-exclusion"), 0, k, table)
}

/// Which structural condition a check refers to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Condition {
    /// Boundary rates vanish.
    ABoundary,
    /// Positive rates away from the boundary.
    ANondegenerate,
    B,
    C,
    BricklayersConstraint,
    /// Bounded increments of `r` on the positive window.
    DIncrementsPositive,
    /// Essentially linear growth of `r` on the positive window.
    DGrowthPositive,
    DIncrementsNegative,
    DGrowthNegative,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConditionCheck {
    pub condition: Condition,
    pub passed: bool,
    /// Informational checks do not gate downstream use.
    pub required: bool,
    pub counterexample: Option<Vec<Spin>>,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ValidationReport {
    pub model: String,
    pub window: Spin,
    pub checks: Vec<ConditionCheck>,
}

impl ValidationReport {
    pub fn all_passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed || !c.required)
    }

    pub fn check(&self, condition: Condition) -> Option<&ConditionCheck> {
        self.checks.iter().find(|c| c.condition == condition)
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "model {} (window {})", self.model, self.window)?;
        for c in &self.checks {
            let status = match (c.passed, c.required) {
                (true, _) => "pass",
                (false, true) => "FAIL",
                (false, false) => "fail (informational)",
            };
            write!(f, "  {:?}: {status}", c.condition)?;
            if let Some(ce) = &c.counterexample {
                write!(f, " at {ce:?}")?;
            }
            if !c.detail.is_empty() {
                write!(f, " [{}]", c.detail)?;
            }
            writeln!(f)?;
        }
        write!(
            f,
            "overall: {}",
            if self.all_passed() { "pass" } else { "FAIL" }
        )
    }
}

fn close(a: f64, b: f64) -> bool {
    (a - b).abs() <= REL_TOL * a.abs().max(b.abs()).max(1.0)
}

fn check(
    condition: Condition,
    counterexample: Option<Vec<Spin>>,
    detail: String,
) -> ConditionCheck {
    ConditionCheck {
        condition,
        passed: counterexample.is_none(),
        required: true,
        counterexample,
        detail,
    }
}

/// Checks conditions A–C (and D for unbounded kinds) on `S ∩ [-window, window]`.
pub fn validate_conditions(
    model: &RateModel,
    window: Spin,
) -> Result<ValidationReport, ModelError> {
    let bounds = model.bounds();
    let (lo, hi) = bounds.window(window);
    let spins: Vec<Spin> = (lo..=hi).collect();
    if spins.is_empty() {
        return Err(ModelError::EmptyTable);
    }
    for &x in &spins {
        for &y in &spins {
            let value = model.rate(x, y);
            if !(value.is_finite() && value >= 0.0) {
                return Err(ModelError::BadRate { x, y, value });
            }
        }
    }

    let mut checks = Vec::new();

    let mut boundary = None;
    'a: for &x in &spins {
        for &y in &spins {
            let at_min = bounds.z_min == Some(x);
            let at_max = bounds.z_max == Some(y);
            if (at_min || at_max) && model.rate(x, y) != 0.0 {
                boundary = Some(vec![x, y]);
                break 'a;
            }
        }
    }
    checks.push(check(Condition::ABoundary, boundary, String::new()));

    let mut blocked = None;
    'n: for &x in &spins {
        for &y in &spins {
            if bounds.z_min != Some(x) && bounds.z_max != Some(y) && model.rate(x, y) <= 0.0 {
                blocked = Some(vec![x, y]);
                break 'n;
            }
        }
    }
    checks.push(check(Condition::ANondegenerate, blocked, String::new()));

    let c = |x, y| model.rate(x, y);
    let mut cyclic = None;
    'b: for &x in &spins {
        for &y in &spins {
            for &z in &spins {
                let lhs = c(x, y) + c(y, z) + c(z, x);
                let rhs = c(y, x) + c(z, y) + c(x, z);
                if !close(lhs, rhs) {
                    cyclic = Some(vec![x, y, z]);
                    break 'b;
                }
            }
        }
    }
    checks.push(check(Condition::B, cyclic, String::new()));

    let upper: Vec<Spin> = spins
        .iter()
        .copied()
        .filter(|&z| bounds.z_min != Some(z))
        .collect();
    let mut product = None;
    'c: for &x in &upper {
        for &y in &upper {
            for &z in &upper {
                let lhs = c(x, y - 1) * c(y, z - 1) * c(z, x - 1);
                let rhs = c(y, x - 1) * c(z, y - 1) * c(x, z - 1);
                if !close(lhs, rhs) {
                    product = Some(vec![x, y, z]);
                    break 'c;
                }
            }
        }
    }
    checks.push(check(Condition::C, product, String::new()));

    if matches!(model.kind(), RateKind::Bricklayers(_)) {
        let bad = (1..=window).find(|&z| {
            let r = |z| model.native_r(z).unwrap_or(f64::NAN);
            !close(r(z) * r(1 - z), 1.0)
        });
        checks.push(check(
            Condition::BricklayersConstraint,
            bad.map(|z| vec![z]),
            String::new(),
        ));
    }

    if !bounds.is_bounded() {
        let r = |z: Spin| model.native_r(z).expect("unbounded models carry r");
        let positive: Vec<f64> = (0..=window).map(r).collect();
        checks.extend(growth_checks(&positive, 0, window, true));
        if bounds.z_min.is_none() {
            let negative: Vec<f64> = (-window..=0).map(r).collect();
            checks.extend(growth_checks(&negative, -window, window, false));
        }
    }

    Ok(ValidationReport {
        model: model.to_string(),
        window,
        checks,
    })
}

/// Condition D on one side: `values[i] = r(offset + i)`.
fn growth_checks(
    values: &[f64],
    offset: Spin,
    window: Spin,
    positive: bool,
) -> Vec<ConditionCheck> {
    let (inc, growth) = if positive {
        (Condition::DIncrementsPositive, Condition::DGrowthPositive)
    } else {
        (Condition::DIncrementsNegative, Condition::DGrowthNegative)
    };
    let mut checks = Vec::with_capacity(2);

    let a1 = values
        .windows(2)
        .map(|w| (w[1] - w[0]).abs())
        .fold(0.0, f64::max);
    let mut c = check(
        inc,
        (!a1.is_finite()).then(|| vec![offset]),
        format!("window-verified, sup |r(x+1)-r(x)| = {a1:.6}"),
    );
    c.required = positive;
    checks.push(c);

    // smallest gap x0 for which r(x) - r(y) >= a2 > 0 whenever x >= y + x0
    let max_gap = (window / 3).max(1) as usize;
    let mut found = None;
    for x0 in 1..=max_gap {
        let mut a2 = f64::INFINITY;
        for y in 0..values.len() {
            for x in (y + x0)..values.len() {
                a2 = a2.min(values[x] - values[y]);
            }
        }
        if a2 > 0.0 && a2.is_finite() {
            found = Some((x0, a2));
            break;
        }
    }
    // a2 must not shrink as the window grows; compare with the half nearest 0
    let half = values.len() / 2;
    let inner = if positive {
        &values[..=half]
    } else {
        &values[values.len() - 1 - half..]
    };
    let decaying = found.and_then(|(x0, a2)| {
        let inner_a2 = (0..inner.len())
            .flat_map(|y| ((y + x0)..inner.len()).map(move |x| (x, y)))
            .map(|(x, y)| inner[x] - inner[y])
            .fold(f64::INFINITY, f64::min);
        (inner_a2.is_finite() && a2 < 0.5 * inner_a2).then_some((x0, a2, inner_a2))
    });
    let mut c = match (found, decaying) {
        (Some(_), Some((x0, a2, inner_a2))) => {
            let mut c = check(
                growth,
                Some(vec![offset]),
                format!("x0 = {x0}: a2 = {a2:.3e} on the window but {inner_a2:.3e} on its inner half; increments decay"),
            );
            c.passed = false;
            c
        }
        (Some((x0, a2)), None) => check(
            growth,
            None,
            format!("window-verified, x0 = {x0}, a2 = {a2:.6}"),
        ),
        (None, _) => {
            // locate a witness pair for the largest admissible gap
            let x0 = max_gap;
            let witness = (0..values.len())
                .flat_map(|y| ((y + x0)..values.len()).map(move |x| (x, y)))
                .find(|&(x, y)| values[x] - values[y] <= 0.0)
                .map(|(x, y)| vec![offset + x as Spin, offset + y as Spin]);
            let mut c = check(
                growth,
                witness.or(Some(vec![offset])),
                format!("no x0 <= {x0} works"),
            );
            c.passed = false;
            c
        }
    };
    c.required = positive;
    checks.push(c);
    checks
}

/// `r` on a finite window of `S`, as derived from the rate table.
#[derive(Debug, Clone, PartialEq)]
pub struct DerivedR {
    /// Spin of `values[0]`.
    pub lo: Spin,
    /// `r(lo), r(lo + 1), ...`; `+inf` past a finite `z_max`.
    pub values: Vec<f64>,
}

impl DerivedR {
    pub fn hi(&self) -> Spin {
        self.lo + self.values.len() as Spin - 1
    }

    pub fn get(&self, z: Spin) -> Option<f64> {
        if z < self.lo {
            return None;
        }
        self.values.get((z - self.lo) as usize).copied()
    }
}

/// Reconstructs `r` from `c` via `c(x, y-1) / c(y, x-1) = r(x) / r(y)`.
///
/// Normalisation: `r(z_min + 1) = c(z_min + 1, z_min)` when `z_min` is finite;
/// otherwise `r(0) r(1) = 1`, which is the bricklayers gauge.
pub fn derive_r(model: &RateModel, window: Spin) -> Result<DerivedR, ModelError> {
    let bounds = model.bounds();
    let (lo, hi) = bounds.window(window);
    let c = |x, y| model.rate(x, y);

    let (start, anchor, mut values) = match bounds.z_min {
        Some(zmin) => {
            let anchor = zmin + 1;
            let base = c(anchor, zmin);
            if base <= 0.0 {
                return Err(ModelError::DivisionByZero { x: anchor, y: zmin });
            }
            let mut values = vec![0.0, base];
            for x in (anchor + 1)..=hi {
                let den = c(anchor, x - 1);
                if den <= 0.0 {
                    return Err(ModelError::DivisionByZero {
                        x: anchor,
                        y: x - 1,
                    });
                }
                values.push(base * c(x, zmin) / den);
            }
            (zmin, anchor, values)
        }
        None => {
            // ratios relative to r(1), then fix the scale by r(0) r(1) = 1
            let mut ratios = Vec::with_capacity((hi - lo + 1) as usize);
            for x in lo..=hi {
                let den = c(1, x - 1);
                if den <= 0.0 {
                    return Err(ModelError::DivisionByZero { x: 1, y: x - 1 });
                }
                ratios.push(c(x, 0) / den);
            }
            let at_zero = ratios[(0 - lo) as usize];
            let scale = 1.0 / at_zero.sqrt();
            (lo, 1, ratios.into_iter().map(|v| v * scale).collect())
        }
    };

    // every pair must agree with the anchored recursion
    let first = if bounds.z_min.is_some() {
        start + 1
    } else {
        start
    };
    for x in first..=hi {
        for y in first..=hi {
            let rx = values[(x - start) as usize];
            let ry = values[(y - start) as usize];
            let lhs = c(x, y - 1) * ry;
            let rhs = c(y, x - 1) * rx;
            if !close(lhs, rhs) {
                return Err(ModelError::InconsistentRatios {
                    x,
                    y,
                    anchor,
                    lhs,
                    rhs,
                });
            }
        }
    }
    if bounds.z_max.is_some() {
        values.push(f64::INFINITY);
    }
    Ok(DerivedR { lo: start, values })
}
