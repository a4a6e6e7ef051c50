//! Spectral regularization filters `g_λ(σ)` and their residuals
//! `r_λ(σ) = 1 - σ g_λ(σ)`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::index_fn::IndexFunction;
use crate::numerics::{first_decrease, geometric_grid};

/// Filter selection as written in configuration files.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "snake_case", deny_unknown_fields)]
pub enum FilterConfig {
    Tikhonov,
    IteratedTikhonov {
        nu: u32,
    },
    Landweber {
        /// Step size, defaults to `1/κ²`.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        tau: Option<f64>,
    },
    Cutoff,
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Kind {
    Tikhonov,
    Iterated(u32),
    Landweber(f64),
    Cutoff,
}

/// Highest source power the filter can exploit.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Qualification {
    Finite(f64),
    Unbounded,
}

impl Qualification {
    pub fn admits(self, p: f64) -> bool {
        match self {
            Qualification::Finite(q) => p <= q,
            Qualification::Unbounded => true,
        }
    }
}

/// Constants of the filter axioms:
/// `σ|g| ≤ D`, `λ|g| ≤ B`, `|r| ≤ γ`, `|r| σ^p ≤ γ_p λ^p` for `p` up to the qualification.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FilterConstants {
    pub d: f64,
    pub b: f64,
    pub gamma: f64,
    pub qualification: Qualification,
}

/// A spectral filter bound to a spectrum bound `κ²`.
#[derive(Debug, Clone, PartialEq)]
pub struct Filter {
    kind: Kind,
    config: FilterConfig,
}

/// Instantiate a filter; `kappa2` fixes the Landweber default step.
pub fn make_filter(config: &FilterConfig, kappa2: f64) -> Result<Filter> {
    if !(kappa2.is_finite() && kappa2 > 0.0) {
        return Err(Error::Parameter(format!("spectrum bound must be positive, got {kappa2}")));
    }
    let kind = match *config {
        FilterConfig::Tikhonov => Kind::Tikhonov,
        FilterConfig::IteratedTikhonov { nu } => {
            if nu == 0 {
                return Err(Error::Parameter("iterated Tikhonov needs nu >= 1".into()));
            }
            Kind::Iterated(nu)
        }
        FilterConfig::Landweber { tau } => {
            let tau = tau.unwrap_or(1.0 / kappa2);
            if !(tau > 0.0 && tau * kappa2 <= 1.0 + 1e-12) {
                return Err(Error::Parameter(format!(
                    "Landweber step must lie in (0, 1/κ²], got {tau}"
                )));
            }
            Kind::Landweber(tau)
        }
        FilterConfig::Cutoff => Kind::Cutoff,
    };
    let config = match kind {
        Kind::Landweber(tau) => FilterConfig::Landweber { tau: Some(tau) },
        _ => config.clone(),
    };
    Ok(Filter { kind, config })
}

impl Filter {
    pub fn config(&self) -> &FilterConfig {
        &self.config
    }

    pub fn name(&self) -> &'static str {
        match self.kind {
            Kind::Tikhonov => "tikhonov",
            Kind::Iterated(_) => "iterated_tikhonov",
            Kind::Landweber(_) => "landweber",
            Kind::Cutoff => "cutoff",
        }
    }

    pub fn label(&self) -> String {
        match self.kind {
            Kind::Iterated(nu) => format!("iterated_tikhonov(nu={nu})"),
            Kind::Landweber(tau) => format!("landweber(tau={tau})"),
            _ => self.name().to_string(),
        }
    }

    /// `g_λ(σ)` for `σ > 0`, `λ > 0`.
    pub fn eval(&self, sigma: f64, lambda: f64) -> Result<f64> {
        check_args(sigma, lambda)?;
        Ok(self.gain(sigma, lambda))
    }

    /// `r_λ(σ)` for `σ > 0`, `λ > 0`.
    pub fn residual(&self, sigma: f64, lambda: f64) -> Result<f64> {
        check_args(sigma, lambda)?;
        Ok(self.residual_unchecked(sigma, lambda))
    }

    /// Filter gain on an empirical spectrum. Clamped eigenvalues `σ <= 0`
    /// take the continuous extension `lim_{σ→0+} g_λ(σ)`, so the spectral
    /// Tikhonov solution equals `(K/m + λ)^{-1} y/m` even on a rank-deficient Gram.
    pub fn apply(&self, sigma: f64, lambda: f64) -> f64 {
        if sigma > 0.0 {
            return self.gain(sigma, lambda);
        }
        match self.kind {
            Kind::Tikhonov => 1.0 / lambda,
            Kind::Iterated(nu) => nu as f64 / lambda,
            Kind::Landweber(tau) => tau * landweber_steps(lambda),
            Kind::Cutoff => 0.0,
        }
    }

    fn gain(&self, s: f64, l: f64) -> f64 {
        match self.kind {
            Kind::Tikhonov => 1.0 / (s + l),
            Kind::Iterated(nu) => {
                let q = l / (s + l);
                let mut acc = 0.0;
                let mut pow = 1.0;
                for _ in 0..nu {
                    acc += pow;
                    pow *= q;
                }
                acc / (s + l)
            }
            Kind::Landweber(tau) => {
                let steps = landweber_steps(l);
                -(steps * (-tau * s).ln_1p()).exp_m1() / s
            }
            Kind::Cutoff => {
                if s >= l {
                    1.0 / s
                } else {
                    0.0
                }
            }
        }
    }

    fn residual_unchecked(&self, s: f64, l: f64) -> f64 {
        match self.kind {
            Kind::Tikhonov => l / (s + l),
            Kind::Iterated(nu) => (l / (s + l)).powi(nu as i32),
            Kind::Landweber(tau) => (landweber_steps(l) * (-tau * s).ln_1p()).exp(),
            Kind::Cutoff => {
                if s >= l {
                    0.0
                } else {
                    1.0
                }
            }
        }
    }

    pub fn constants(&self) -> FilterConstants {
        match self.kind {
            Kind::Tikhonov => FilterConstants {
                d: 1.0,
                b: 1.0,
                gamma: 1.0,
                qualification: Qualification::Finite(1.0),
            },
            Kind::Iterated(nu) => FilterConstants {
                d: 1.0,
                b: nu as f64,
                gamma: 1.0,
                qualification: Qualification::Finite(nu as f64),
            },
            Kind::Landweber(tau) => FilterConstants {
                d: 1.0,
                // ν = ceil(1/λ) ≤ (1 + λ)/λ, valid for λ ≤ max(1, 1/τ)
                b: tau * (1.0 + landweber_lambda_max(tau)),
                gamma: 1.0,
                qualification: Qualification::Unbounded,
            },
            Kind::Cutoff => FilterConstants {
                d: 1.0,
                b: 1.0,
                gamma: 1.0,
                qualification: Qualification::Unbounded,
            },
        }
    }

    /// `γ_p` in `|r_λ(σ)| σ^p ≤ γ_p λ^p`.
    pub fn gamma_p(&self, p: f64) -> Result<f64> {
        if !self.constants().qualification.admits(p) || p < 0.0 {
            return Err(Error::Parameter(format!(
                "power {p} exceeds the qualification of {}",
                self.label()
            )));
        }
        Ok(match self.kind {
            Kind::Landweber(tau) if p > 0.0 => (p / (std::f64::consts::E * tau)).powf(p),
            _ => 1.0,
        })
    }

    /// Whether the qualification dominates `φ`, i.e. `t^p/φ(t)` (or
    /// `t^p/(φ(t)√t)` with `extra_sqrt`) is nondecreasing on the flag grid.
    pub fn covers_index(&self, phi: &IndexFunction, extra_sqrt: bool) -> bool {
        let p = match self.constants().qualification {
            Qualification::Unbounded => return true,
            Qualification::Finite(p) => p,
        };
        let values: Vec<f64> = phi
            .flag_grid(crate::index_fn::DEFAULT_FLAG_GRID)
            .into_iter()
            .map(|t| {
                let denom = if extra_sqrt {
                    phi.value(t) * t.sqrt()
                } else {
                    phi.value(t)
                };
                t.powf(p) / denom
            })
            .collect();
        first_decrease(&values, crate::index_fn::FLAG_SLACK).is_none()
    }
}

fn landweber_steps(lambda: f64) -> f64 {
    (1.0 / lambda).ceil()
}

fn landweber_lambda_max(tau: f64) -> f64 {
    1.0f64.max(1.0 / tau)
}

fn check_args(sigma: f64, lambda: f64) -> Result<()> {
    if !(sigma > 0.0 && sigma.is_finite()) {
        return Err(Error::Domain(format!("filter argument σ = {sigma} must be positive")));
    }
    if !(lambda > 0.0 && lambda.is_finite()) {
        return Err(Error::Domain(format!("regularization λ = {lambda} must be positive")));
    }
    Ok(())
}

/// Worst observed ratio for one filter axiom over the verification grid.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConstantCheck {
    pub axiom: String,
    pub claimed: f64,
    pub observed: f64,
    pub passed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConstantsReport {
    pub filter: String,
    pub sigma_points: usize,
    pub lambda_points: usize,
    pub checks: Vec<ConstantCheck>,
    pub max_identity_error: f64,
}

impl ConstantsReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }
}

pub const VERIFY_SLACK: f64 = 1e-9;
const UNBOUNDED_POWERS: [f64; 4] = [0.5, 1.0, 2.0, 3.0];

/// Check every claimed constant on geometric grids
/// `σ ∈ [1e-8 κ², κ²]`, `λ ∈ [1e-6, 1]`.
pub fn verify_constants(filter: &Filter, kappa2: f64, points: usize) -> Result<ConstantsReport> {
    if points < 256 {
        return Err(Error::Parameter(format!("verification grid needs >= 256 points, got {points}")));
    }
    let sigmas = geometric_grid(1e-8 * kappa2, kappa2, points);
    let lambdas = geometric_grid(1e-6, 1.0, points);
    let c = filter.constants();
    let powers: Vec<f64> = match c.qualification {
        Qualification::Finite(q) => UNBOUNDED_POWERS
            .iter()
            .copied()
            .filter(|&p| p < q)
            .chain(std::iter::once(q))
            .collect(),
        Qualification::Unbounded => UNBOUNDED_POWERS.to_vec(),
    };

    let mut worst_d = 0.0f64;
    let mut worst_b = 0.0f64;
    let mut worst_gamma = 0.0f64;
    let mut worst_p = vec![0.0f64; powers.len()];
    let mut identity = 0.0f64;
    for &l in &lambdas {
        for &s in &sigmas {
            let g = filter.eval(s, l)?;
            let r = filter.residual(s, l)?;
            worst_d = worst_d.max(s * g.abs());
            worst_b = worst_b.max(l * g.abs());
            worst_gamma = worst_gamma.max(r.abs());
            identity = identity.max((s * g + r - 1.0).abs());
            for (w, &p) in worst_p.iter_mut().zip(&powers) {
                *w = w.max(r.abs() * (s / l).powf(p));
            }
        }
    }
    let check = |axiom: String, claimed: f64, observed: f64| ConstantCheck {
        passed: observed <= claimed * (1.0 + VERIFY_SLACK),
        axiom,
        claimed,
        observed,
    };
    let mut checks = vec![
        check("sigma*|g| <= D".into(), c.d, worst_d),
        check("lambda*|g| <= B".into(), c.b, worst_b),
        check("|r| <= gamma".into(), c.gamma, worst_gamma),
    ];
    for (w, &p) in worst_p.iter().zip(&powers) {
        checks.push(check(
            format!("|r|*sigma^{p} <= gamma_p*lambda^{p}"),
            filter.gamma_p(p)?,
            *w,
        ));
    }
    Ok(ConstantsReport {
        filter: filter.label(),
        sigma_points: points,
        lambda_points: points,
        checks,
        max_identity_error: identity,
    })
}
