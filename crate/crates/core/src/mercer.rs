//! Synthetic Mercer model on `X = [0, 2π]` with uniform marginal.
//!
//! The integral operator has eigenpairs `(t_n, ẽ_n)` where `ẽ_n` is the
//! trigonometric system, orthonormal in `L²(ν)`. The RKHS basis is
//! `e_n = √t_n ẽ_n`, orthonormal in `H` with `‖e_n‖_ρ = √t_n`. Coefficient
//! matrices are `N_trunc × d`, rows indexed by `n`, columns by output channel.

use std::f64::consts::{PI, SQRT_2};

use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gram::Dataset;
use crate::index_fn::{IndexFunction, MonotoneFlags};
use crate::rng::rng_from_seed;

pub const TWO_PI: f64 = 2.0 * PI;
/// Points in the sup-grid used for `κ²`.
pub const KAPPA_GRID: usize = 4096;
pub const DEFAULT_N_TRUNC: usize = 512;

/// Where inside the decay envelope `[α n^{-b}, β n^{-b}]` the spectrum sits.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum SpectrumRule {
    #[default]
    Lower,
    Upper,
    Midpoint,
    /// `(1 - w) α + w β` times `n^{-b}`.
    Interpolate { w: f64 },
    Explicit { values: Vec<f64> },
}

/// Source profile for the target `f = φ(L_K) g`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum SourceKind {
    /// `ĝ_n ∝ n^{-s}`, alternating sign across channels.
    #[default]
    PowerLaw,
    /// All mass on mode `mode`, channel 0.
    SingleMode,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SourceConfig {
    #[serde(default)]
    pub kind: SourceKind,
    #[serde(rename = "R")]
    pub radius: f64,
    #[serde(default = "default_source_decay")]
    pub s: f64,
    #[serde(default = "default_mode")]
    pub mode: usize,
}

fn default_source_decay() -> f64 {
    1.0
}

fn default_mode() -> usize {
    1
}

impl Default for SourceConfig {
    fn default() -> Self {
        SourceConfig {
            kind: SourceKind::PowerLaw,
            radius: 1.0,
            s: 1.0,
            mode: 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum NoiseConfig {
    Gaussian {
        sigma: f64,
    },
    /// Outputs on `±dL v_j`; see [`crate::minimax::TwoPointMeasure`].
    TwoPoint {
        #[serde(rename = "L")]
        amplitude: f64,
    },
}

impl Default for NoiseConfig {
    fn default() -> Self {
        NoiseConfig::Gaussian { sigma: 0.5 }
    }
}

/// Model persisted as JSON.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    pub b: f64,
    #[serde(default = "one")]
    pub alpha: f64,
    #[serde(default = "one")]
    pub beta: f64,
    #[serde(rename = "N_trunc", default = "default_n_trunc")]
    pub n_trunc: usize,
    #[serde(default = "default_d")]
    pub d: usize,
    #[serde(default)]
    pub spectrum_rule: SpectrumRule,
    #[serde(default)]
    pub source: SourceConfig,
    #[serde(default)]
    pub noise: NoiseConfig,
}

fn one() -> f64 {
    1.0
}

fn default_n_trunc() -> usize {
    DEFAULT_N_TRUNC
}

fn default_d() -> usize {
    1
}

impl ModelConfig {
    pub fn build(&self) -> Result<MercerModel> {
        build_model(
            self.b,
            self.alpha,
            self.beta,
            &self.spectrum_rule,
            self.d,
            self.n_trunc,
        )
    }
}

/// Truncated Mercer model with separable kernel `k(x, x') I_d`.
#[derive(Debug, Clone, PartialEq)]
pub struct MercerModel {
    b: f64,
    alpha: f64,
    beta: f64,
    d: usize,
    t: Vec<f64>,
    kappa2: f64,
}

/// Build a model from decay parameters.
pub fn build_model(
    b: f64,
    alpha: f64,
    beta: f64,
    rule: &SpectrumRule,
    d: usize,
    n_trunc: usize,
) -> Result<MercerModel> {
    if !(b.is_finite() && b >= 1.0) {
        return Err(Error::Construction(format!("decay exponent b = {b} must be >= 1")));
    }
    if !(alpha > 0.0 && alpha <= beta && beta.is_finite()) {
        return Err(Error::Construction(format!(
            "decay envelope needs 0 < alpha <= beta, got alpha={alpha}, beta={beta}"
        )));
    }
    if n_trunc < 8 {
        return Err(Error::Construction(format!("N_trunc = {n_trunc} must be >= 8")));
    }
    if d == 0 {
        return Err(Error::Construction("output dimension must be >= 1".into()));
    }
    let envelope = |n: usize| (n as f64).powf(-b);
    let t: Vec<f64> = match rule {
        SpectrumRule::Lower => (1..=n_trunc).map(|n| alpha * envelope(n)).collect(),
        SpectrumRule::Upper => (1..=n_trunc).map(|n| beta * envelope(n)).collect(),
        SpectrumRule::Midpoint => (1..=n_trunc)
            .map(|n| 0.5 * (alpha + beta) * envelope(n))
            .collect(),
        SpectrumRule::Interpolate { w } => {
            if !(0.0..=1.0).contains(w) {
                return Err(Error::Construction(format!("interpolation weight {w} outside [0, 1]")));
            }
            (1..=n_trunc)
                .map(|n| ((1.0 - w) * alpha + w * beta) * envelope(n))
                .collect()
        }
        SpectrumRule::Explicit { values } => {
            if values.len() != n_trunc {
                return Err(Error::Construction(format!(
                    "explicit spectrum has {} values, N_trunc = {n_trunc}",
                    values.len()
                )));
            }
            values.clone()
        }
    };
    for (i, &tn) in t.iter().enumerate() {
        let e = envelope(i + 1);
        // explicit values are taken literally; computed ones may round by an ulp
        let slack = 1e-14 * beta * e;
        if !(tn >= alpha * e - slack && tn <= beta * e + slack) {
            return Err(Error::Construction(format!(
                "t_{} = {tn} outside envelope [{}, {}]",
                i + 1,
                alpha * e,
                beta * e
            )));
        }
    }
    if t.windows(2).any(|w| w[1] > w[0]) {
        return Err(Error::Construction("spectrum must be nonincreasing".into()));
    }
    let mut model = MercerModel {
        b,
        alpha,
        beta,
        d,
        t,
        kappa2: 0.0,
    };
    model.kappa2 = model.kappa2_on_grid(KAPPA_GRID);
    Ok(model)
}

/// `ẽ_n(x)` for 1-based `n`.
pub fn basis(n: usize, x: f64) -> f64 {
    debug_assert!(n >= 1);
    if n == 1 {
        1.0
    } else if n.is_multiple_of(2) {
        SQRT_2 * ((n / 2) as f64 * x).cos()
    } else {
        SQRT_2 * (((n - 1) / 2) as f64 * x).sin()
    }
}

/// Fill `out[n - 1] = ẽ_n(x)` for `n = 1..=out.len()`.
pub fn basis_row(x: f64, out: &mut [f64]) {
    if out.is_empty() {
        return;
    }
    out[0] = 1.0;
    let mut n = 2;
    let mut k = 1.0;
    while n <= out.len() {
        let (s, c) = (k * x).sin_cos();
        out[n - 1] = SQRT_2 * c;
        if n < out.len() {
            out[n] = SQRT_2 * s;
        }
        n += 2;
        k += 1.0;
    }
}

impl MercerModel {
    /// Small model from an explicit nonincreasing spectrum, bypassing the
    /// decay envelope and the `N_trunc >= 8` requirement.
    pub fn from_spectrum(t: Vec<f64>, d: usize) -> Result<Self> {
        if t.is_empty() || d == 0 {
            return Err(Error::Construction("empty spectrum or zero output dimension".into()));
        }
        if t.iter().any(|&v| !(v > 0.0 && v.is_finite())) || t.windows(2).any(|w| w[1] > w[0]) {
            return Err(Error::Construction("spectrum must be positive and nonincreasing".into()));
        }
        let ratios = t.iter().enumerate().map(|(i, &v)| v * (i + 1) as f64);
        let alpha = ratios.clone().fold(f64::INFINITY, f64::min);
        let beta = ratios.fold(0.0, f64::max);
        let mut model = MercerModel {
            b: 1.0,
            alpha,
            beta,
            d,
            t,
            kappa2: 0.0,
        };
        model.kappa2 = model.kappa2_on_grid(KAPPA_GRID);
        Ok(model)
    }

    pub fn b(&self) -> f64 {
        self.b
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn n_trunc(&self) -> usize {
        self.t.len()
    }

    pub fn eigenvalues(&self) -> &[f64] {
        &self.t
    }

    /// `κ² = sup_x d Σ_n t_n ẽ_n(x)²`, taken on a uniform grid.
    pub fn kappa2(&self) -> f64 {
        self.kappa2
    }

    pub fn kappa2_on_grid(&self, points: usize) -> f64 {
        let mut row = vec![0.0; self.t.len()];
        (0..points)
            .map(|i| {
                basis_row(TWO_PI * i as f64 / points as f64, &mut row);
                row.iter().zip(&self.t).map(|(e, t)| t * e * e).sum::<f64>()
            })
            .fold(0.0, f64::max)
            * self.d as f64
    }

    /// Scalar kernel `k(x, x') = Σ t_n ẽ_n(x) ẽ_n(x')`; the full block is `k I_d`.
    pub fn kernel(&self, x: f64, y: f64) -> f64 {
        (1..=self.t.len())
            .map(|n| self.t[n - 1] * (basis(n, x) * basis(n, y)))
            .sum()
    }

    /// `m × N` matrix with entries `√t_n ẽ_n(x_i)`.
    pub fn feature_matrix(&self, xs: &[f64]) -> DMatrix<f64> {
        let n = self.t.len();
        let sqrt_t: Vec<f64> = self.t.iter().map(|t| t.sqrt()).collect();
        let mut row = vec![0.0; n];
        let mut phi = DMatrix::zeros(xs.len(), n);
        for (i, &x) in xs.iter().enumerate() {
            basis_row(x, &mut row);
            for k in 0..n {
                phi[(i, k)] = sqrt_t[k] * row[k];
            }
        }
        phi
    }

    /// Upper bound `β N^{1-b}/(b-1)` on the discarded mass `Σ_{n>N} t_n`.
    pub fn tail_mass_bound(&self) -> f64 {
        if self.b <= 1.0 {
            f64::INFINITY
        } else {
            self.beta * (self.t.len() as f64).powf(1.0 - self.b) / (self.b - 1.0)
        }
    }

    /// Eigenvalue the untruncated model would assign to mode `n`.
    fn extended_eigenvalue(&self, n: usize) -> f64 {
        let ratio = self.t[self.t.len() - 1] * (self.t.len() as f64).powf(self.b);
        ratio * (n as f64).powf(-self.b)
    }

    /// Coefficients `ĝ` of the configured source, scaled to `‖ĝ‖ = R`.
    pub fn source_coefficients(&self, source: &SourceConfig) -> Result<DMatrix<f64>> {
        if !(source.radius >= 0.0 && source.radius.is_finite()) {
            return Err(Error::Parameter(format!("source radius {} must be >= 0", source.radius)));
        }
        let n = self.t.len();
        let mut g = DMatrix::zeros(n, self.d);
        match source.kind {
            SourceKind::PowerLaw => {
                for j in 0..self.d {
                    let sign = if j % 2 == 0 { 1.0 } else { -1.0 };
                    for k in 0..n {
                        g[(k, j)] = sign * ((k + 1) as f64).powf(-source.s);
                    }
                }
            }
            SourceKind::SingleMode => {
                if source.mode == 0 || source.mode > n {
                    return Err(Error::Parameter(format!(
                        "source mode {} outside 1..={n}",
                        source.mode
                    )));
                }
                g[(source.mode - 1, 0)] = 1.0;
            }
        }
        let norm = g.norm();
        Ok(g * (source.radius / norm))
    }

    /// Estimate of the ρ-energy the power-law target would place beyond
    /// `N_trunc` in the untruncated model: `Σ_{n>N} t_n φ(t_n)² ĝ_n²`.
    pub fn target_tail_energy(&self, phi: &IndexFunction, source: &SourceConfig) -> f64 {
        if source.kind == SourceKind::SingleMode {
            return 0.0;
        }
        let n = self.t.len();
        let norm2: f64 = (1..=n).map(|k| (k as f64).powf(-2.0 * source.s)).sum::<f64>()
            * self.d as f64;
        let scale2 = source.radius * source.radius / norm2;
        let mut tail = 0.0;
        for k in n + 1..=n * 256 {
            let t = self.extended_eigenvalue(k);
            let term = t * phi.value(t).powi(2) * (k as f64).powf(-2.0 * source.s);
            tail += term;
            if term < 1e-18 * tail {
                break;
            }
        }
        tail * scale2 * self.d as f64
    }

    /// `(‖c‖_ρ, ‖c‖_H)` for H-basis coefficients.
    pub fn norms_of_expansion(&self, c: &DMatrix<f64>) -> (f64, f64) {
        let mut rho2 = 0.0;
        let mut h2 = 0.0;
        for (k, t) in self.t.iter().enumerate() {
            for j in 0..c.ncols() {
                let v = c[(k, j)];
                h2 += v * v;
                rho2 += t * v * v;
            }
        }
        (rho2.sqrt(), h2.sqrt())
    }

    /// Evaluate an H-basis expansion at `x`, one value per channel.
    pub fn eval_expansion(&self, c: &DMatrix<f64>, x: f64) -> Vec<f64> {
        let mut row = vec![0.0; self.t.len()];
        basis_row(x, &mut row);
        (0..c.ncols())
            .map(|j| {
                row.iter()
                    .zip(&self.t)
                    .enumerate()
                    .map(|(k, (e, t))| c[(k, j)] * t.sqrt() * e)
                    .sum()
            })
            .collect()
    }
}

/// Target `f_H = φ(L_K) g` in H-basis coefficients.
#[derive(Debug, Clone, PartialEq)]
pub struct TargetFunction {
    pub coeffs: DMatrix<f64>,
    pub source: DMatrix<f64>,
    pub source_norm: f64,
    pub radius: f64,
    pub phi: IndexFunction,
}

/// `f̂_{n,j} = φ(t_n) ĝ_{n,j}`; fails when `‖ĝ‖ > R`.
pub fn target_from_source(
    model: &MercerModel,
    phi: &IndexFunction,
    g: &DMatrix<f64>,
    radius: f64,
) -> Result<TargetFunction> {
    if g.nrows() != model.n_trunc() || g.ncols() != model.d() {
        return Err(Error::Parameter(format!(
            "source has shape {}x{}, model needs {}x{}",
            g.nrows(),
            g.ncols(),
            model.n_trunc(),
            model.d()
        )));
    }
    let norm = g.norm();
    if norm > radius * (1.0 + 1e-12) {
        return Err(Error::SourceViolation { norm, radius });
    }
    let mut coeffs = g.clone();
    for (k, &t) in model.eigenvalues().iter().enumerate() {
        let w = phi.eval(t)?;
        coeffs.row_mut(k).scale_mut(w);
    }
    Ok(TargetFunction {
        coeffs,
        source: g.clone(),
        source_norm: norm,
        radius,
        phi: phi.clone(),
    })
}

impl TargetFunction {
    pub fn eval(&self, model: &MercerModel, x: f64) -> Vec<f64> {
        model.eval_expansion(&self.coeffs, x)
    }
}

/// Coefficients of `f_λ = (L_K + λ)^{-1} L_K f_H`.
pub fn population_regularized(model: &MercerModel, target: &TargetFunction, lambda: f64) -> Result<DMatrix<f64>> {
    if !(lambda > 0.0) {
        return Err(Error::Parameter(format!("lambda = {lambda} must be positive")));
    }
    let mut c = target.coeffs.clone();
    for (k, &t) in model.eigenvalues().iter().enumerate() {
        c.row_mut(k).scale_mut(t / (t + lambda));
    }
    Ok(c)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoundCheck {
    pub name: &'static str,
    pub value: f64,
    pub bound: f64,
    pub holds: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ApproxErrorReport {
    pub lambda: f64,
    pub rho: f64,
    pub h: f64,
    pub checks: Vec<BoundCheck>,
    /// Set when the flags of `φ` license none of the bounds.
    pub note: Option<String>,
}

impl ApproxErrorReport {
    pub fn all_hold(&self) -> bool {
        self.checks.iter().all(|c| c.holds)
    }
}

/// Exact `‖f_λ - f_H‖` in both norms, checked against the analytic bounds
/// licensed by the monotonicity flags of `φ`.
///
/// With `worst_case`, each norm is maximized over single-mode sources
/// `ĝ = R e_n` instead of using the target's own source.
pub fn approx_error_norms(
    model: &MercerModel,
    target: &TargetFunction,
    lambda: f64,
    worst_case: bool,
) -> Result<ApproxErrorReport> {
    if !(lambda > 0.0 && lambda <= model.kappa2() * (1.0 + 1e-12)) {
        return Err(Error::Domain(format!(
            "lambda = {lambda} outside (0, κ² = {}]",
            model.kappa2()
        )));
    }
    let phi = &target.phi;
    let r = target.radius;
    let (rho, h) = if worst_case {
        model.eigenvalues().iter().fold((0.0f64, 0.0f64), |(a, b), &t| {
            let e = r * lambda / (t + lambda) * phi.value(t);
            (a.max(e * t.sqrt()), b.max(e))
        })
    } else {
        let mut rho2 = 0.0;
        let mut h2 = 0.0;
        for (k, &t) in model.eigenvalues().iter().enumerate() {
            let w = lambda / (t + lambda);
            for j in 0..model.d() {
                let e = w * target.coeffs[(k, j)];
                h2 += e * e;
                rho2 += t * e * e;
            }
        }
        (rho2.sqrt(), h2.sqrt())
    };

    let flags: MonotoneFlags = phi.flags();
    let phi_l = phi.value(lambda);
    let kappa = model.kappa2().sqrt();
    let check = |name, value: f64, bound: f64| BoundCheck {
        name,
        value,
        bound,
        holds: value <= bound * (1.0 + 4.0 * f64::EPSILON),
    };
    let mut checks = Vec::new();
    if flags.phi_times_sqrt_t_nondecreasing && flags.sqrt_t_over_phi_nondecreasing {
        checks.push(check("rho <= R phi(lambda) sqrt(lambda)", rho, r * phi_l * lambda.sqrt()));
    }
    if flags.phi_nondecreasing && flags.t_over_phi_nondecreasing {
        checks.push(check("rho <= R kappa phi(lambda)", rho, r * kappa * phi_l));
        checks.push(check("h <= R phi(lambda)", h, r * phi_l));
    }
    let note = checks.is_empty().then(|| "no applicable bound".to_string());
    Ok(ApproxErrorReport {
        lambda,
        rho,
        h,
        checks,
        note,
    })
}

/// Noise model with certified Bernstein constants `(M, Σ)`:
/// `E[e^{‖η‖/M} - ‖η‖/M - 1] ≤ Σ²/(2M²)`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NoiseSpec {
    pub config: NoiseConfig,
    pub d: usize,
    #[serde(rename = "M")]
    pub m_const: f64,
    #[serde(rename = "Sigma")]
    pub sigma_const: f64,
    /// Left side of the moment condition (quadrature for Gaussian noise).
    pub moment_lhs: f64,
    pub moment_rhs: f64,
    pub certified: bool,
    /// Whether `σ² ≤ min(M²/2, π^{d/2}Σ²/(4 S^d ∫e^{-t²+t}t^{d+1}dt))` also holds.
    pub closed_form_cap_ok: Option<bool>,
}

/// Derive and certify `(M, Σ)` for a noise model.
pub fn certify_noise(config: &NoiseConfig, d: usize) -> Result<NoiseSpec> {
    if d == 0 {
        return Err(Error::Parameter("output dimension must be >= 1".into()));
    }
    let df = d as f64;
    match *config {
        NoiseConfig::Gaussian { sigma } => {
            if !(sigma >= 0.0 && sigma.is_finite()) {
                return Err(Error::Parameter(format!("noise sigma {sigma} must be >= 0")));
            }
            if sigma == 0.0 {
                return Ok(NoiseSpec {
                    config: config.clone(),
                    d,
                    m_const: 0.0,
                    sigma_const: 0.0,
                    moment_lhs: 0.0,
                    moment_rhs: 0.0,
                    certified: true,
                    closed_form_cap_ok: Some(true),
                });
            }
            let m = 3.0 * sigma * df.sqrt();
            let s = 2.0 * sigma * df.sqrt();
            let lhs = gaussian_moment(sigma, m, d);
            let rhs = s * s / (2.0 * m * m);
            let cap = (m * m / 2.0).min(
                PI.powf(df / 2.0) * s * s / (4.0 * sphere_area(d) * shifted_gaussian_moment(d)),
            );
            Ok(NoiseSpec {
                config: config.clone(),
                d,
                m_const: m,
                sigma_const: s,
                moment_lhs: lhs,
                moment_rhs: rhs,
                certified: lhs <= rhs,
                closed_form_cap_ok: Some(sigma * sigma <= cap),
            })
        }
        NoiseConfig::TwoPoint { amplitude } => {
            if !(amplitude > 0.0 && amplitude.is_finite()) {
                return Err(Error::Parameter(format!("two-point amplitude {amplitude} must be > 0")));
            }
            // ‖y - f‖ ≤ dL + ‖f‖ with ‖f‖ ≤ L/4 on the lower-bound families
            let m = df * amplitude + amplitude / 4.0;
            let s = SQRT_2 * df * amplitude;
            // u = ‖y - f‖/M ≤ 1 and e^u - u - 1 ≤ (e - 2)u², with E‖y - f‖² ≤ (dL)²
            let lhs = (std::f64::consts::E - 2.0) * (df * amplitude / m).powi(2);
            let rhs = s * s / (2.0 * m * m);
            Ok(NoiseSpec {
                config: config.clone(),
                d,
                m_const: m,
                sigma_const: s,
                moment_lhs: lhs,
                moment_rhs: rhs,
                certified: lhs <= rhs,
                closed_form_cap_ok: None,
            })
        }
    }
}

/// Surface area `2π^{d/2}/Γ(d/2)` of the unit sphere in `R^d`.
pub fn sphere_area(d: usize) -> f64 {
    2.0 * PI.powf(d as f64 / 2.0) / libm::tgamma(d as f64 / 2.0)
}

/// Composite Simpson rule on `[0, hi]`.
fn simpson(f: impl Fn(f64) -> f64, hi: f64, panels: usize) -> f64 {
    let n = panels + panels % 2;
    let h = hi / n as f64;
    let mut acc = f(0.0) + f(hi);
    for i in 1..n {
        acc += f(i as f64 * h) * if i % 2 == 1 { 4.0 } else { 2.0 };
    }
    acc * h / 3.0
}

/// `E[e^{‖η‖/M} - ‖η‖/M - 1]` for `η ~ N(0, σ² I_d)`, via the chi density.
fn gaussian_moment(sigma: f64, m: f64, d: usize) -> f64 {
    let df = d as f64;
    let a = sigma / m;
    let integral = simpson(
        |u| {
            let x = a * u;
            let excess = if x < 1e-4 {
                x * x / 2.0 + x * x * x / 6.0
            } else {
                x.exp_m1() - x
            };
            excess * (-u * u / 2.0).exp() * u.powf(df - 1.0)
        },
        40.0,
        8000,
    );
    (2.0 * PI).powf(-df / 2.0) * sphere_area(d) * integral
}

/// `∫_0^∞ e^{-t² + t} t^{d+1} dt`.
fn shifted_gaussian_moment(d: usize) -> f64 {
    simpson(|t| (-t * t + t).exp() * t.powi(d as i32 + 1), 30.0, 8000)
}

/// Draw `m` samples `(x_i, y_i)` with `x_i ~ U[0, 2π]`.
pub fn sample_dataset(
    model: &MercerModel,
    target: &TargetFunction,
    noise: &NoiseSpec,
    m: usize,
    seed: u64,
) -> Result<Dataset> {
    if m == 0 {
        return Err(Error::Parameter("sample size must be >= 1".into()));
    }
    let mut rng = rng_from_seed(seed);
    let xs: Vec<f64> = (0..m).map(|_| rng.gen::<f64>() * TWO_PI).collect();
    let d = model.d();
    let phi = model.feature_matrix(&xs);
    let clean = &phi * &target.coeffs;
    let mut ys = DMatrix::zeros(m, d);
    match noise.config {
        NoiseConfig::Gaussian { sigma } => {
            for i in 0..m {
                for j in 0..d {
                    let eta: f64 = rng.sample(StandardNormal);
                    ys[(i, j)] = clean[(i, j)] + sigma * eta;
                }
            }
        }
        NoiseConfig::TwoPoint { amplitude } => {
            let df = d as f64;
            for i in 0..m {
                let j = rng.gen_range(0..d);
                let f = clean[(i, j)];
                if f.abs() > amplitude {
                    return Err(Error::Amplitude(format!(
                        "|f_{j}(x)| = {} exceeds L = {amplitude}",
                        f.abs()
                    )));
                }
                let up = rng.gen::<f64>() < (amplitude + f) / (2.0 * amplitude);
                ys[(i, j)] = if up { df * amplitude } else { -df * amplitude };
            }
        }
    }
    Dataset::new(xs, ys)
}

/// Random source with `‖ĝ‖ ≤ R`: Gaussian entries, random power-law
/// envelope and random radius fraction.
pub fn random_source<R: Rng>(model: &MercerModel, radius: f64, rng: &mut R) -> DMatrix<f64> {
    let s: f64 = rng.gen_range(0.0..2.0);
    let frac: f64 = rng.gen_range(0.2..1.0);
    let mut g = DMatrix::from_fn(model.n_trunc(), model.d(), |k, _| {
        let z: f64 = rng.sample(StandardNormal);
        z * ((k + 1) as f64).powf(-s)
    });
    let norm = g.norm();
    g *= frac * radius / norm;
    g
}
