//! Effective dimension, a-priori parameter choices, the sample-size
//! condition of the upper-rate theorems, and theoretical rate exponents.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::index_fn::{RateMap, RateMaps, DEFAULT_REL_TOL};
use crate::mercer::MercerModel;

/// `N(λ) = Σ t_n/(t_n + λ)` for one channel.
pub fn effective_dimension(spectrum: &[f64], lambda: f64) -> f64 {
    spectrum.iter().map(|&t| t / (t + lambda)).sum()
}

/// `d · N(λ)` for a separable model.
pub fn model_effective_dimension(model: &MercerModel, lambda: f64) -> f64 {
    model.d() as f64 * effective_dimension(model.eigenvalues(), lambda)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EffdimPoint {
    pub lambda: f64,
    pub value: f64,
    /// `d βb/(b-1) λ^{-1/b}`, absent for `b <= 1`.
    pub polynomial_bound: Option<f64>,
    pub crude_bound: f64,
    pub polynomial_ok: Option<bool>,
    pub crude_ok: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EffdimReport {
    pub points: Vec<EffdimPoint>,
    /// Largest `value / bound` attained, per bound.
    pub max_polynomial_ratio: Option<f64>,
    pub max_crude_ratio: f64,
}

impl EffdimReport {
    pub fn all_hold(&self) -> bool {
        self.points
            .iter()
            .all(|p| p.crude_ok && p.polynomial_ok.unwrap_or(true))
    }
}

/// Check `N(λ) ≤ βb/(b-1) λ^{-1/b}` (when `b > 1`) and `N(λ) ≤ κ²/λ`.
pub fn effdim_bound_check(model: &MercerModel, lambdas: &[f64]) -> Result<EffdimReport> {
    let b = model.b();
    let d = model.d() as f64;
    let mut points = Vec::with_capacity(lambdas.len());
    for &lambda in lambdas {
        if !(lambda > 0.0) {
            return Err(Error::Parameter(format!("lambda = {lambda} must be positive")));
        }
        let value = model_effective_dimension(model, lambda);
        let polynomial_bound =
            (b > 1.0).then(|| d * model.beta() * b / (b - 1.0) * lambda.powf(-1.0 / b));
        let crude_bound = model.kappa2() / lambda;
        points.push(EffdimPoint {
            lambda,
            value,
            polynomial_bound,
            crude_bound,
            polynomial_ok: polynomial_bound.map(|p| value <= p),
            crude_ok: value <= crude_bound,
        });
    }
    let max_polynomial_ratio = (b > 1.0).then(|| {
        points
            .iter()
            .map(|p| p.value / p.polynomial_bound.unwrap())
            .fold(0.0, f64::max)
    });
    let max_crude_ratio = points.iter().map(|p| p.value / p.crude_bound).fold(0.0, f64::max);
    Ok(EffdimReport {
        points,
        max_polynomial_ratio,
        max_crude_ratio,
    })
}

/// A-priori parameter choice.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ParamRule {
    /// `λ = Ψ^{-1}(m^{-1/2})`, `Ψ(t) = t^{1/2 + 1/(2b)} φ(t)`.
    Psi,
    /// `λ = Θ^{-1}(m^{-1/2})`, `Θ(t) = t^{1/(2b)} φ(t)`.
    Theta,
    /// `m^{-b/(2br+b+1)}` for `φ = t^r`.
    HolderPsiClosed,
    /// `m^{-b/(2br+1)}` for `φ = t^r`.
    HolderThetaClosed,
}

impl ParamRule {
    /// Whether the rule follows the `Ψ` balance (as opposed to `Θ`).
    pub fn is_psi(self) -> bool {
        matches!(self, ParamRule::Psi | ParamRule::HolderPsiClosed)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LambdaChoice {
    pub lambda: f64,
    /// Value before clipping to `(0, 1]`.
    pub raw: f64,
    pub clipped: bool,
}

pub fn choose_lambda(rule: ParamRule, maps: &RateMaps, m: usize) -> Result<LambdaChoice> {
    if m < 2 {
        return Err(Error::Parameter(format!("sample size m = {m} must be >= 2")));
    }
    let y = (m as f64).powf(-0.5);
    let b = maps.b();
    let closed = |denominator: fn(f64, f64) -> f64| -> Result<f64> {
        let r = maps.phi().holder_exponent().ok_or_else(|| {
            Error::RuleMismatch(format!("{rule:?} needs a Hölder index function"))
        })?;
        Ok((m as f64).powf(-b / denominator(b, r)))
    };
    let raw = match rule {
        ParamRule::Psi => maps.invert(RateMap::Balance, y, DEFAULT_REL_TOL)?,
        ParamRule::Theta => maps.invert(RateMap::CoarseBalance, y, DEFAULT_REL_TOL)?,
        ParamRule::HolderPsiClosed => closed(|b, r| 2.0 * b * r + b + 1.0)?,
        ParamRule::HolderThetaClosed => closed(|b, r| 2.0 * b * r + 1.0)?,
    };
    let clipped = raw > 1.0;
    if clipped {
        log::info!("lambda {raw} clipped to 1 at m = {m}");
    }
    Ok(LambdaChoice {
        lambda: raw.min(1.0),
        raw,
        clipped,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ConditionCheck {
    pub holds: bool,
    /// `√m λ / (8κ² log(4/η))`.
    pub margin: f64,
}

/// Relative slack on the margin comparison, so exact equality counts.
pub const CONDITION_SLACK: f64 = 1e-12;

/// The sample-size requirement `√m λ ≥ 8κ² log(4/η)`.
///
/// Accepts any `η ∈ (0, 4)` so that `log(4/η) > 0`; the theorems use `η < 1`.
pub fn check_theorem_condition(m: usize, lambda: f64, kappa: f64, eta: f64) -> Result<ConditionCheck> {
    if !(eta > 0.0 && eta < 4.0) {
        return Err(Error::Parameter(format!("confidence eta = {eta} outside (0, 4)")));
    }
    if m == 0 || !(lambda > 0.0) || !(kappa > 0.0) {
        return Err(Error::Parameter("m, lambda and kappa must be positive".into()));
    }
    let lhs = (m as f64).sqrt() * lambda;
    let rhs = 8.0 * kappa * kappa * (4.0 / eta).ln();
    let margin = lhs / rhs;
    Ok(ConditionCheck {
        holds: margin >= 1.0 - CONDITION_SLACK,
        margin,
    })
}

/// Exponents `e` of `m^{-e}` rates for Hölder smoothness `r` and decay `b`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RateExponents {
    pub b: f64,
    pub r: f64,
    pub rkhs_upper: f64,
    pub l2_upper_theta: f64,
    pub l2_upper_psi: f64,
    pub l2_lower: f64,
    pub rkhs_lower: f64,
}

pub fn rate_exponents(b: f64, r: f64) -> Result<RateExponents> {
    if !(b >= 1.0 && b.is_finite()) {
        return Err(Error::Parameter(format!("decay exponent b = {b} must be >= 1")));
    }
    if !(r >= 0.0 && r.is_finite()) {
        return Err(Error::Parameter(format!("smoothness r = {r} must be >= 0")));
    }
    let br = b * r;
    // Lower rates follow from the packing scale λ_ε = ε-balance:
    // λ ~ m^{-e1} and the error ~ λ^{r} (H) or λ^{r + 1/2} (ρ).
    let e1 = b / (2.0 * br + b + 1.0);
    Ok(RateExponents {
        b,
        r,
        rkhs_upper: br / (2.0 * br + b + 1.0),
        l2_upper_theta: br / (2.0 * br + 1.0),
        l2_upper_psi: (2.0 * br + b) / (4.0 * br + 2.0 * b + 2.0),
        l2_lower: e1 * (r + 0.5),
        rkhs_lower: e1 * r,
    })
}

impl RateExponents {
    /// Individual lower exponent in `L²` for `φ(t)/t^{r₁}`, `t^{r₂}/φ(t)` nondecreasing.
    pub fn individual_l2(&self, eps: f64, r1: f64, r2: f64) -> f64 {
        let (c1, c2) = (2.0 * r1 + 1.0, 2.0 * r2 + 1.0);
        (self.b * c2 + eps) / (self.b * c1 + eps + 1.0)
    }

    /// Individual lower exponent in `H`, as stated, unverified.
    pub fn individual_rkhs(&self, eps: f64, r1: f64, r2: f64) -> f64 {
        let (c1, c2) = (2.0 * r1 + 1.0, 2.0 * r2 + 1.0);
        (self.b * c2 - self.b + eps) / (self.b * c1 + eps + 1.0)
    }

    /// Whether upper and lower exponents agree to `tol`.
    pub fn optimal(&self, tol: f64) -> bool {
        (self.rkhs_upper - self.rkhs_lower).abs() <= tol
            && (self.l2_upper_psi - self.l2_lower).abs() <= tol
    }
}
