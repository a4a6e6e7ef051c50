//! Index functions describing target smoothness, the rate maps built from
//! them, and monotone inversion.
//!
//! A target satisfies the source condition when `f = φ(L_K) g` with
//! `‖g‖_H ≤ R`. The built-in families are Hölder `t^r`, logarithmic
//! `t^p log^{-ν}(1/t)` and finite products of those.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::{first_decrease, geometric_grid};

/// Grid resolution used for the monotonicity flags.
pub const DEFAULT_FLAG_GRID: usize = 512;
/// Lower end of the flag grid, relative to the spectrum bound.
pub const FLAG_GRID_FLOOR: f64 = 1e-12;
/// Relative slack for ratio comparisons on the flag grid.
pub const FLAG_SLACK: f64 = 1e-12;
/// Logarithmic factors are frozen above this point.
pub const LOG_FREEZE: f64 = 0.99;

pub const DEFAULT_REL_TOL: f64 = 1e-10;
pub const MAX_BISECTIONS: usize = 200;
pub const BRACKET_FLOOR: f64 = 1e-300;

/// Parametric family of an index function, as written in configuration files.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum IndexKind {
    Holder { r: f64 },
    Log { p: f64, nu: f64 },
    Product { factors: Vec<IndexKind> },
}

impl IndexKind {
    fn validate(&self) -> Result<()> {
        match self {
            IndexKind::Holder { r } if !(r.is_finite() && *r >= 0.0) => {
                Err(Error::Parameter(format!("holder exponent must be >= 0, got {r}")))
            }
            IndexKind::Log { p, nu }
                if !(p.is_finite() && nu.is_finite() && *p >= 0.0 && *nu >= 0.0) =>
            {
                Err(Error::Parameter(format!(
                    "log index needs p >= 0 and nu >= 0, got p={p}, nu={nu}"
                )))
            }
            IndexKind::Product { factors } if factors.is_empty() => {
                Err(Error::Parameter("product index with no factors".into()))
            }
            IndexKind::Product { factors } => factors.iter().try_for_each(IndexKind::validate),
            _ => Ok(()),
        }
    }

    /// Value for `t > 0`, without domain checks.
    fn value_positive(&self, t: f64) -> f64 {
        match self {
            IndexKind::Holder { r } => {
                if *r == 0.0 {
                    1.0
                } else {
                    t.powf(*r)
                }
            }
            IndexKind::Log { p, nu } => {
                let frozen = t.min(LOG_FREEZE);
                let power = if *p == 0.0 { 1.0 } else { t.powf(*p) };
                power * (1.0 / frozen).ln().powf(-*nu)
            }
            IndexKind::Product { factors } => {
                factors.iter().map(|f| f.value_positive(t)).product()
            }
        }
    }

    /// Total exponent when every factor is Hölder.
    pub fn holder_exponent(&self) -> Option<f64> {
        match self {
            IndexKind::Holder { r } => Some(*r),
            IndexKind::Log { .. } => None,
            IndexKind::Product { factors } => factors
                .iter()
                .map(IndexKind::holder_exponent)
                .sum::<Option<f64>>(),
        }
    }
}

/// Monotonicity flags of the maps that license the approximation bounds.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct MonotoneFlags {
    pub phi_nondecreasing: bool,
    pub t_over_phi_nondecreasing: bool,
    pub sqrt_t_over_phi_nondecreasing: bool,
    pub phi_times_sqrt_t_nondecreasing: bool,
}

/// Outcome of one grid monotonicity check.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MapCheck {
    pub map: &'static str,
    pub nondecreasing: bool,
    /// `(t_i, t_{i+1}, value_i, value_{i+1})` at the first violation.
    pub first_violation: Option<(f64, f64, f64, f64)>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FlagReport {
    pub grid_size: usize,
    pub checks: Vec<MapCheck>,
}

impl FlagReport {
    pub fn flags(&self) -> MonotoneFlags {
        let ok = |name: &str| {
            self.checks
                .iter()
                .find(|c| c.map == name)
                .map(|c| c.nondecreasing)
                .unwrap_or(false)
        };
        MonotoneFlags {
            phi_nondecreasing: ok("phi"),
            t_over_phi_nondecreasing: ok("t/phi"),
            sqrt_t_over_phi_nondecreasing: ok("sqrt(t)/phi"),
            phi_times_sqrt_t_nondecreasing: ok("phi*sqrt(t)"),
        }
    }
}

/// A monotone index function on `[0, domain_max]`.
#[derive(Debug, Clone, PartialEq)]
pub struct IndexFunction {
    kind: IndexKind,
    domain_max: f64,
    flags: MonotoneFlags,
}

impl IndexFunction {
    pub fn new(kind: IndexKind, domain_max: f64) -> Result<Self> {
        kind.validate()?;
        if !(domain_max.is_finite() && domain_max > 0.0) {
            return Err(Error::Parameter(format!(
                "index domain bound must be positive, got {domain_max}"
            )));
        }
        let mut phi = IndexFunction {
            kind,
            domain_max,
            flags: MonotoneFlags {
                phi_nondecreasing: false,
                t_over_phi_nondecreasing: false,
                sqrt_t_over_phi_nondecreasing: false,
                phi_times_sqrt_t_nondecreasing: false,
            },
        };
        phi.flags = check_monotone_flags(&phi, DEFAULT_FLAG_GRID)?.flags();
        if !phi.flags.phi_nondecreasing {
            return Err(Error::Parameter("index function is not nondecreasing".into()));
        }
        Ok(phi)
    }

    pub fn holder(r: f64, domain_max: f64) -> Result<Self> {
        Self::new(IndexKind::Holder { r }, domain_max)
    }

    pub fn log(p: f64, nu: f64, domain_max: f64) -> Result<Self> {
        Self::new(IndexKind::Log { p, nu }, domain_max)
    }

    pub fn kind(&self) -> &IndexKind {
        &self.kind
    }

    pub fn domain_max(&self) -> f64 {
        self.domain_max
    }

    pub fn flags(&self) -> MonotoneFlags {
        self.flags
    }

    pub fn holder_exponent(&self) -> Option<f64> {
        self.kind.holder_exponent()
    }

    /// `φ(t)` for `t ∈ [0, domain_max]`; exactly zero at the origin.
    pub fn eval(&self, t: f64) -> Result<f64> {
        if !(t >= 0.0 && t <= self.domain_max * (1.0 + 1e-12)) {
            return Err(Error::Domain(format!(
                "index argument {t} outside [0, {}]",
                self.domain_max
            )));
        }
        Ok(self.value(t))
    }

    /// `φ(t)` for any `t >= 0`, extending the formula past `domain_max`.
    pub fn value(&self, t: f64) -> f64 {
        if t <= 0.0 {
            0.0
        } else {
            self.kind.value_positive(t)
        }
    }

    /// The geometric grid on which monotonicity is checked.
    pub fn flag_grid(&self, n: usize) -> Vec<f64> {
        geometric_grid(self.domain_max * FLAG_GRID_FLOOR, self.domain_max, n)
    }
}

/// Which of the three derived maps to use.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RateMap {
    /// `t^{1/2 + 1/(2b)} φ(t)`
    Balance,
    /// `t^{1/(2b)} φ(t)`
    CoarseBalance,
    /// `t^{1/2} φ(t)`
    SqrtWeighted,
}

/// The maps that turn an index function and a decay exponent into
/// a-priori parameter choices and rate curves.
#[derive(Debug, Clone, PartialEq)]
pub struct RateMaps {
    phi: IndexFunction,
    b: f64,
}

/// Build the rate maps for decay exponent `b`.
pub fn make_rate_maps(phi: &IndexFunction, b: f64) -> Result<RateMaps> {
    if !(b.is_finite() && b > 0.0) {
        return Err(Error::Parameter(format!("decay exponent must be positive, got {b}")));
    }
    if b <= 1.0 {
        log::warn!("decay exponent b = {b} <= 1: polynomial effective-dimension bound unavailable");
    }
    Ok(RateMaps {
        phi: phi.clone(),
        b,
    })
}

impl RateMaps {
    pub fn b(&self) -> f64 {
        self.b
    }

    pub fn phi(&self) -> &IndexFunction {
        &self.phi
    }

    pub fn balance(&self, t: f64) -> f64 {
        t.powf(0.5 + 0.5 / self.b) * self.phi.value(t)
    }

    pub fn coarse_balance(&self, t: f64) -> f64 {
        t.powf(0.5 / self.b) * self.phi.value(t)
    }

    pub fn sqrt_weighted(&self, t: f64) -> f64 {
        t.sqrt() * self.phi.value(t)
    }

    pub fn eval(&self, map: RateMap, t: f64) -> f64 {
        match map {
            RateMap::Balance => self.balance(t),
            RateMap::CoarseBalance => self.coarse_balance(t),
            RateMap::SqrtWeighted => self.sqrt_weighted(t),
        }
    }

    /// Inverse of one map at `y`, searched from the bracket `(0, 1]`.
    pub fn invert(&self, map: RateMap, y: f64, rel_tol: f64) -> Result<f64> {
        invert_monotone(|t| self.eval(map, t), 1e-8, 1.0, y, rel_tol)
    }
}

/// Solve `F(t) = y` for an increasing `F` by geometric bisection.
///
/// The bracket `(lo, hi]` is widened automatically: downward to
/// [`BRACKET_FLOOR`], upward until `F(hi) >= y`.
pub fn invert_monotone<F>(f: F, lo: f64, hi: f64, y: f64, rel_tol: f64) -> Result<f64>
where
    F: Fn(f64) -> f64,
{
    if !(y.is_finite() && y > 0.0) {
        return Err(Error::Domain(format!("inversion target must be positive, got {y}")));
    }
    if !(lo > 0.0 && hi > lo) {
        return Err(Error::Parameter(format!("invalid bracket ({lo}, {hi}]")));
    }
    let (mut lo, mut hi) = (lo, hi);
    if f(lo) > f(hi) {
        return Err(Error::Contract(format!(
            "map is not increasing on ({lo:e}, {hi:e}]"
        )));
    }
    while f(lo) > y {
        if lo <= BRACKET_FLOOR {
            return Err(Error::Underflow {
                target: y,
                floor: BRACKET_FLOOR,
            });
        }
        lo = (lo * 1e-4).max(BRACKET_FLOOR);
    }
    while f(hi) < y {
        if hi > 1e300 {
            return Err(Error::Contract(format!("target {y:e} above the attainable range")));
        }
        hi *= 2.0;
    }
    let close = |v: f64| ((v - y) / y).abs() <= rel_tol;
    if close(f(lo)) {
        return Ok(lo);
    }
    if close(f(hi)) {
        return Ok(hi);
    }
    let mut mid = (lo * hi).sqrt();
    for _ in 0..MAX_BISECTIONS {
        mid = (lo * hi).sqrt();
        let v = f(mid);
        if close(v) {
            return Ok(mid);
        }
        if v < y {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(mid)
}

/// Grid check of `φ`, `t/φ`, `√t/φ` and `φ√t`.
pub fn check_monotone_flags(phi: &IndexFunction, grid_size: usize) -> Result<FlagReport> {
    if grid_size < 64 {
        return Err(Error::Parameter(format!("flag grid needs >= 64 points, got {grid_size}")));
    }
    let grid = phi.flag_grid(grid_size);
    type Map = fn(f64, f64) -> f64;
    let maps: [(&'static str, Map); 4] = [
        ("phi", |_t, p| p),
        ("t/phi", |t, p| t / p),
        ("sqrt(t)/phi", |t, p| t.sqrt() / p),
        ("phi*sqrt(t)", |t, p| p * t.sqrt()),
    ];
    let checks = maps
        .iter()
        .map(|(name, map)| {
            let values: Vec<f64> = grid.iter().map(|&t| map(t, phi.value(t))).collect();
            let violation = first_decrease(&values, FLAG_SLACK)
                .map(|i| (grid[i], grid[i + 1], values[i], values[i + 1]));
            MapCheck {
                map: name,
                nondecreasing: violation.is_none(),
                first_violation: violation,
            }
        })
        .collect();
    Ok(FlagReport { grid_size, checks })
}
