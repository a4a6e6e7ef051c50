//! Gram matrices `(1/m)[k(x_i, x_j)]` and their symmetric eigendecomposition.
//!
//! The scaled Gram matrix is the matrix of `S_x S_x*` for the sampling
//! operator with the `1/m`-weighted output norm; its nonzero spectrum equals
//! that of `S_x* S_x`.

use std::io::Write;
use std::sync::Arc;

use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mercer::MercerModel;

/// Samples `(x_i, y_i)`; `ys` is `m × d`.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub xs: Vec<f64>,
    pub ys: DMatrix<f64>,
}

impl Dataset {
    pub fn new(xs: Vec<f64>, ys: DMatrix<f64>) -> Result<Self> {
        if xs.is_empty() {
            return Err(Error::Data("dataset needs at least one sample".into()));
        }
        if xs.len() != ys.nrows() {
            return Err(Error::Data(format!(
                "{} inputs but {} outputs",
                xs.len(),
                ys.nrows()
            )));
        }
        Ok(Dataset { xs, ys })
    }

    pub fn m(&self) -> usize {
        self.xs.len()
    }

    pub fn d(&self) -> usize {
        self.ys.ncols()
    }
}

/// Scalar kernel; the operator-valued kernel is `k I_d`.
#[derive(Debug, Clone, PartialEq)]
pub enum Kernel {
    Mercer(Arc<MercerModel>),
    GaussianRbf { lengthscale: f64 },
}

/// Serializable description of a kernel.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum KernelDescriptor {
    Mercer {
        b: f64,
        alpha: f64,
        beta: f64,
        #[serde(rename = "N_trunc")]
        n_trunc: usize,
        d: usize,
    },
    GaussianRbf {
        lengthscale: f64,
    },
}

impl Kernel {
    pub fn mercer(model: &MercerModel) -> Self {
        Kernel::Mercer(Arc::new(model.clone()))
    }

    pub fn eval(&self, x: f64, y: f64) -> f64 {
        match self {
            Kernel::Mercer(model) => model.kernel(x, y),
            Kernel::GaussianRbf { lengthscale } => {
                let r = (x - y) / lengthscale;
                (-0.5 * r * r).exp()
            }
        }
    }

    pub fn descriptor(&self) -> KernelDescriptor {
        match self {
            Kernel::Mercer(m) => KernelDescriptor::Mercer {
                b: m.b(),
                alpha: m.alpha(),
                beta: m.beta(),
                n_trunc: m.n_trunc(),
                d: m.d(),
            },
            Kernel::GaussianRbf { lengthscale } => KernelDescriptor::GaussianRbf {
                lengthscale: *lengthscale,
            },
        }
    }

    /// Unscaled cross-kernel matrix `[k(a_i, b_j)]`.
    pub fn cross(&self, a: &[f64], b: &[f64]) -> DMatrix<f64> {
        match self {
            Kernel::Mercer(model) => {
                let fa = model.feature_matrix(a);
                let fb = model.feature_matrix(b);
                fa * fb.transpose()
            }
            Kernel::GaussianRbf { .. } => {
                DMatrix::from_fn(a.len(), b.len(), |i, j| self.eval(a[i], b[j]))
            }
        }
    }
}

/// Symmetric scaled Gram matrix `(1/m)[k(x_i, x_j)]`.
pub fn assemble_gram(kernel: &Kernel, xs: &[f64]) -> Result<DMatrix<f64>> {
    if let Kernel::GaussianRbf { lengthscale } = kernel {
        if !(*lengthscale > 0.0 && lengthscale.is_finite()) {
            return Err(Error::Parameter(format!("lengthscale {lengthscale} must be positive")));
        }
    }
    let m = xs.len();
    let k = kernel.cross(xs, xs);
    if let Some(bad) = k.iter().find(|v| !v.is_finite()) {
        return Err(Error::Data(format!("non-finite kernel value {bad}")));
    }
    let scale = 0.5 / m as f64;
    Ok(DMatrix::from_fn(m, m, |i, j| (k[(i, j)] + k[(j, i)]) * scale))
}

/// Descending eigenpairs of a symmetric matrix with nonnegative eigenvalues.
#[derive(Debug, Clone, PartialEq)]
pub struct GramEigen {
    pub values: Vec<f64>,
    /// Columns are orthonormal eigenvectors, ordered like `values`.
    pub vectors: DMatrix<f64>,
    /// Diagonal shift applied before decomposition; always zero.
    pub jitter: f64,
    /// Most negative eigenvalue before clamping (zero if none).
    pub min_raw: f64,
}

pub const NEGATIVE_WARN: f64 = 1e-10;

pub fn eigendecompose(gram: &DMatrix<f64>) -> Result<GramEigen> {
    if !gram.is_square() {
        return Err(Error::Numerical(format!(
            "Gram matrix is {}x{}, not square",
            gram.nrows(),
            gram.ncols()
        )));
    }
    let n = gram.nrows();
    let eig = SymmetricEigen::try_new(gram.clone(), f64::EPSILON, 0).ok_or_else(|| {
        let scale = gram.amax();
        Error::Numerical(format!(
            "symmetric eigensolver did not converge (n={n}, max |entry| = {scale:e})"
        ))
    })?;
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let raw: Vec<f64> = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let top = raw.first().copied().unwrap_or(0.0).max(0.0);
    let min_raw = raw.iter().copied().fold(0.0f64, f64::min);
    if min_raw < -NEGATIVE_WARN * top {
        log::warn!("clamping eigenvalue {min_raw:e} (top {top:e}) to zero");
    }
    let mut vectors = DMatrix::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        vectors.set_column(dst, &eig.eigenvectors.column(src));
    }
    Ok(GramEigen {
        values: raw.iter().map(|&v| v.max(0.0)).collect(),
        vectors,
        jitter: 0.0,
        min_raw,
    })
}

impl GramEigen {
    pub fn reconstruct(&self) -> DMatrix<f64> {
        let scaled = DMatrix::from_fn(self.vectors.nrows(), self.vectors.ncols(), |i, j| {
            self.vectors[(i, j)] * self.values[j]
        });
        scaled * self.vectors.transpose()
    }

    /// Write the spectrum as CSV with columns `index,eigenvalue`.
    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "index,eigenvalue")?;
        for (i, v) in self.values.iter().enumerate() {
            writeln!(out, "{},{v:e}", i + 1)?;
        }
        Ok(())
    }
}
