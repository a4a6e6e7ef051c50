//! Spectral-filter estimators `f_{z,λ} = g_λ(S_x* S_x) S_x* y`.
//!
//! Normalization: the output norm on samples is `‖y‖_m² = (1/m) Σ ‖y_i‖²`,
//! so `S_x S_x*` is the scaled Gram matrix `(1/m)K` and the ridge normal
//! equations read `(K + mλ I) c = y` on the unscaled Gram.
//!
//! Two exact solvers are provided. The dual path diagonalizes the `m × m`
//! scaled Gram matrix and returns `c = (1/m) U g_λ(μ) Uᵀ y`. For Mercer
//! kernels with `m > N_trunc` the feature path diagonalizes the `N × N`
//! matrix `S_x* S_x = (1/m) Φᵀ Φ` instead, where `Φ_{in} = √t_n ẽ_n(x_i)`,
//! and returns H-basis coefficients `a = V g_λ(ν) Vᵀ (1/m) Φᵀ y`. Both produce
//! the same function because `g(S*S) S* = S* g(SS*)` on matched spectra.

use nalgebra::DMatrix;
use rand::Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::filters::{Filter, FilterConfig};
use crate::gram::{assemble_gram, eigendecompose, Dataset, GramEigen, Kernel, KernelDescriptor};
use crate::mercer::{MercerModel, TargetFunction, TWO_PI};
use crate::rng::rng_from_seed;

/// Which exact solver to use.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SolverPath {
    /// Feature path for Mercer kernels with `m > N_trunc`, dual path otherwise.
    Auto,
    Dual,
    Feature,
}

#[derive(Debug, Clone)]
enum Decomposition {
    Dual(GramEigen),
    Feature {
        phi: DMatrix<f64>,
        eig: GramEigen,
        /// `(1/m) Φᵀ y`, i.e. `S_x* y` in H-basis coordinates.
        rhs: DMatrix<f64>,
    },
}

/// A dataset with its spectral decomposition, reusable across filters and `λ`.
#[derive(Debug, Clone)]
pub struct Prepared {
    dataset: Dataset,
    kernel: Kernel,
    decomposition: Decomposition,
}

/// Decompose once for repeated fits on the same data.
pub fn prepare(dataset: &Dataset, kernel: &Kernel, path: SolverPath) -> Result<Prepared> {
    let feature = match (path, kernel) {
        (SolverPath::Dual, _) => false,
        (SolverPath::Feature, Kernel::Mercer(_)) => true,
        (SolverPath::Feature, _) => {
            return Err(Error::Unsupported("feature path needs a Mercer kernel".into()))
        }
        (SolverPath::Auto, Kernel::Mercer(model)) => dataset.m() > model.n_trunc(),
        (SolverPath::Auto, _) => false,
    };
    let decomposition = match kernel {
        Kernel::Mercer(model) if feature => {
            if model.d() != dataset.d() {
                return Err(Error::Data(format!(
                    "model has {} channels, dataset has {}",
                    model.d(),
                    dataset.d()
                )));
            }
            let m = dataset.m() as f64;
            let phi = model.feature_matrix(&dataset.xs);
            let mut cov = phi.tr_mul(&phi) / m;
            cov = (&cov + cov.transpose()) * 0.5;
            let eig = eigendecompose(&cov)?;
            let rhs = phi.tr_mul(&dataset.ys) / m;
            Decomposition::Feature { phi, eig, rhs }
        }
        _ => Decomposition::Dual(eigendecompose(&assemble_gram(kernel, &dataset.xs)?)?),
    };
    Ok(Prepared {
        dataset: dataset.clone(),
        kernel: kernel.clone(),
        decomposition,
    })
}

impl Prepared {
    /// Eigenvalues of the decomposed operator, descending.
    pub fn spectrum(&self) -> &[f64] {
        match &self.decomposition {
            Decomposition::Dual(e) => &e.values,
            Decomposition::Feature { eig, .. } => &eig.values,
        }
    }

    pub fn path(&self) -> SolverPath {
        match self.decomposition {
            Decomposition::Dual(_) => SolverPath::Dual,
            Decomposition::Feature { .. } => SolverPath::Feature,
        }
    }

    pub fn dataset(&self) -> &Dataset {
        &self.dataset
    }

    pub fn fit(&self, filter: &Filter, lambda: f64) -> Result<FittedEstimator> {
        if !(lambda > 0.0 && lambda.is_finite()) {
            return Err(Error::Parameter(format!("lambda = {lambda} must be positive")));
        }
        let m = self.dataset.m() as f64;
        let (coeffs, h_coeffs) = match &self.decomposition {
            Decomposition::Dual(eig) => {
                let proj = eig.vectors.tr_mul(&self.dataset.ys);
                let gains: Vec<f64> = eig.values.iter().map(|&mu| filter.apply(mu, lambda)).collect();
                let scaled = scale_rows(proj, &gains);
                (&eig.vectors * scaled / m, None)
            }
            Decomposition::Feature { phi, eig, rhs } => {
                let proj = eig.vectors.tr_mul(rhs);
                let gains: Vec<f64> = eig.values.iter().map(|&nu| filter.apply(nu, lambda)).collect();
                let a = &eig.vectors * scale_rows(proj.clone(), &gains);
                // c = (1/m) Φ V diag(g(ν)/ν) Vᵀ S*y, zero on the null space
                let ratios: Vec<f64> = eig
                    .values
                    .iter()
                    .zip(&gains)
                    .map(|(&nu, &g)| if nu > 0.0 { g / nu } else { 0.0 })
                    .collect();
                let c = phi * (&eig.vectors * scale_rows(proj, &ratios)) / m;
                (c, Some(a))
            }
        };
        Ok(FittedEstimator {
            xs: self.dataset.xs.clone(),
            coeffs,
            h_coeffs,
            lambda,
            filter: filter.config().clone(),
            filter_label: filter.label(),
            kernel: self.kernel.clone(),
        })
    }
}

fn scale_rows(mut mat: DMatrix<f64>, w: &[f64]) -> DMatrix<f64> {
    for (i, &wi) in w.iter().enumerate() {
        mat.row_mut(i).scale_mut(wi);
    }
    mat
}

/// `f = Σ_i K_{x_i} c_i`.
#[derive(Debug, Clone)]
pub struct FittedEstimator {
    pub xs: Vec<f64>,
    /// `m × d` representer coefficients.
    pub coeffs: DMatrix<f64>,
    /// H-basis coefficients when the feature path produced them directly.
    h_coeffs: Option<DMatrix<f64>>,
    pub lambda: f64,
    pub filter: FilterConfig,
    pub filter_label: String,
    pub kernel: Kernel,
}

/// Fit with the automatically selected exact solver.
pub fn fit(dataset: &Dataset, kernel: &Kernel, filter: &Filter, lambda: f64) -> Result<FittedEstimator> {
    if !(lambda > 0.0) {
        return Err(Error::Parameter(format!("lambda = {lambda} must be positive")));
    }
    prepare(dataset, kernel, SolverPath::Auto)?.fit(filter, lambda)
}

/// Tikhonov by a direct Cholesky solve of `((1/m)K + λI) c = y/m`.
pub fn fit_tikhonov_direct(dataset: &Dataset, kernel: &Kernel, lambda: f64) -> Result<FittedEstimator> {
    if !(lambda > 0.0 && lambda.is_finite()) {
        return Err(Error::Parameter(format!("lambda = {lambda} must be positive")));
    }
    let m = dataset.m();
    let mut a = assemble_gram(kernel, &dataset.xs)?;
    for i in 0..m {
        a[(i, i)] += lambda;
    }
    let chol = a
        .cholesky()
        .ok_or_else(|| Error::Numerical(format!("Cholesky failed for m={m}, lambda={lambda:e}")))?;
    let coeffs = chol.solve(&(&dataset.ys / m as f64));
    let filter = FilterConfig::Tikhonov;
    Ok(FittedEstimator {
        xs: dataset.xs.clone(),
        coeffs,
        h_coeffs: None,
        lambda,
        filter,
        filter_label: "tikhonov".into(),
        kernel: kernel.clone(),
    })
}

/// Serialized form of a fitted estimator.
#[derive(Debug, Clone, Serialize)]
pub struct FittedExport<'a> {
    pub xs: &'a [f64],
    /// Row `i` is `c_i`.
    pub c: Vec<Vec<f64>>,
    pub lambda: f64,
    pub filter: &'a FilterConfig,
    pub kernel: KernelDescriptor,
}

impl FittedEstimator {
    pub fn d(&self) -> usize {
        self.coeffs.ncols()
    }

    /// `Σ_i k(x, x_i) c_i`.
    pub fn predict(&self, x: f64) -> Vec<f64> {
        let k = self.kernel.cross(&[x], &self.xs);
        (k * &self.coeffs).row(0).iter().copied().collect()
    }

    /// Predictions at many points, `len × d`.
    pub fn predict_many(&self, xs: &[f64]) -> DMatrix<f64> {
        self.kernel.cross(xs, &self.xs) * &self.coeffs
    }

    /// `‖f‖_H`, via `Σ_j c_jᵀ K c_j`.
    pub fn rkhs_norm(&self) -> f64 {
        if let Some(a) = &self.h_coeffs {
            return a.norm();
        }
        let k = self.kernel.cross(&self.xs, &self.xs);
        let kc = k * &self.coeffs;
        self.coeffs.dot(&kc).max(0.0).sqrt()
    }

    /// H-basis coefficients `a_{n,j} = √t_n Σ_i ẽ_n(x_i) c_{ij}`.
    pub fn basis_coefficients(&self, model: &MercerModel) -> Result<DMatrix<f64>> {
        match &self.kernel {
            Kernel::Mercer(own) if own.eigenvalues() == model.eigenvalues() && own.d() == model.d() => {
                Ok(match &self.h_coeffs {
                    Some(a) => a.clone(),
                    None => model.feature_matrix(&self.xs).tr_mul(&self.coeffs),
                })
            }
            Kernel::Mercer(_) => Err(Error::Unsupported(
                "fit used a different Mercer model; use the Monte Carlo norm".into(),
            )),
            Kernel::GaussianRbf { .. } => Err(Error::Unsupported(
                "basis projection needs the model's Mercer kernel; use the Monte Carlo norm".into(),
            )),
        }
    }

    pub fn export(&self) -> FittedExport<'_> {
        FittedExport {
            xs: &self.xs,
            c: self
                .coeffs
                .row_iter()
                .map(|r| r.iter().copied().collect())
                .collect(),
            lambda: self.lambda,
            filter: &self.filter,
            kernel: self.kernel.descriptor(),
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&self.export()).expect("fitted estimator serializes")
    }
}

/// Exact `(‖f_{z,λ} - f_H‖_ρ, ‖f_{z,λ} - f_H‖_H)` by basis projection.
pub fn error_norms(fit: &FittedEstimator, model: &MercerModel, target: &TargetFunction) -> Result<(f64, f64)> {
    let a = fit.basis_coefficients(model)?;
    Ok(model.norms_of_expansion(&(a - &target.coeffs)))
}

pub const MONTE_CARLO_POINTS: usize = 10_000;

/// `‖f_{z,λ} - f_H‖_ρ` by uniform Monte Carlo; works for any kernel.
pub fn rho_error_monte_carlo(
    fit: &FittedEstimator,
    model: &MercerModel,
    target: &TargetFunction,
    points: usize,
    seed: u64,
) -> f64 {
    let mut rng = rng_from_seed(seed);
    let xs: Vec<f64> = (0..points).map(|_| rng.gen::<f64>() * TWO_PI).collect();
    let pred = fit.predict_many(&xs);
    let truth = model.feature_matrix(&xs) * &target.coeffs;
    ((pred - truth).norm_squared() / points as f64).sqrt()
}
