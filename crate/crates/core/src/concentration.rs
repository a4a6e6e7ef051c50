//! Monte Carlo checks of the two concentration inequalities behind the
//! upper rates: the weighted sample error and the operator deviation.

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::effdim::model_effective_dimension;
use crate::error::{Error, Result};
use crate::gram::Dataset;
use crate::mercer::{sample_dataset, MercerModel, NoiseSpec, TargetFunction};
use crate::rng::derive_seed;

pub const MIN_REPLICATES: usize = 100;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StatisticKind {
    /// `‖(L_K + λ)^{-1/2}(S_x* y - S_x* S_x f_H)‖_H`
    SampleError,
    /// `‖S_x* S_x - L_K‖`
    OperatorDeviation,
}

/// Weighted sample error in the truncated basis.
pub fn sample_error_stat(model: &MercerModel, target: &TargetFunction, dataset: &Dataset, lambda: f64) -> Result<f64> {
    if !(lambda > 0.0) {
        return Err(Error::Parameter(format!("lambda = {lambda} must be positive")));
    }
    let phi = model.feature_matrix(&dataset.xs);
    let resid = &dataset.ys - &phi * &target.coeffs;
    let h = phi.tr_mul(&resid) / dataset.m() as f64;
    let mut acc = 0.0;
    for (n, &t) in model.eigenvalues().iter().enumerate() {
        let w = 1.0 / (t + lambda);
        acc += w * h.row(n).norm_squared();
    }
    Ok(acc.sqrt())
}

/// Spectral norm of `(1/m) Φᵀ Φ - diag(t)`; the `k I_d` structure makes the
/// `d` channel blocks identical.
pub fn operator_deviation(model: &MercerModel, dataset: &Dataset) -> Result<f64> {
    let phi = model.feature_matrix(&dataset.xs);
    let mut dev = phi.tr_mul(&phi) / dataset.m() as f64;
    for (n, &t) in model.eigenvalues().iter().enumerate() {
        dev[(n, n)] -= t;
    }
    let sym: DMatrix<f64> = (&dev + dev.transpose()) * 0.5;
    Ok(sym
        .symmetric_eigenvalues()
        .iter()
        .fold(0.0f64, |a, v| a.max(v.abs())))
}

/// High-probability bound for one statistic at confidence `1 - η`.
pub fn tail_bound(kind: StatisticKind, model: &MercerModel, noise: &NoiseSpec, lambda: f64, m: usize, eta: f64) -> Result<f64> {
    if !(eta > 0.0 && eta < 1.0) {
        return Err(Error::Parameter(format!("eta = {eta} outside (0, 1)")));
    }
    let log_term = (4.0 / eta).ln();
    let mf = m as f64;
    let kappa2 = model.kappa2();
    Ok(match kind {
        StatisticKind::SampleError => {
            let n_eff = model_effective_dimension(model, lambda);
            2.0 * (kappa2.sqrt() * noise.m_const / (mf * lambda.sqrt())
                + (noise.sigma_const.powi(2) * n_eff / mf).sqrt())
                * log_term
        }
        StatisticKind::OperatorDeviation => 2.0 * (kappa2 / mf + kappa2 / mf.sqrt()) * log_term,
    })
}

/// One replicate row, as written to CSV.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReplicateRow {
    pub replicate: usize,
    pub statistic: f64,
    pub bound: f64,
    pub violated: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TailReport {
    pub kind: StatisticKind,
    pub m: usize,
    pub lambda: f64,
    pub eta: f64,
    pub bound: f64,
    pub violations: usize,
    pub frequency: f64,
    pub passed: bool,
    /// Median of the statistic over replicates.
    pub median: f64,
    /// `Σ_{n>N} t_n` upper bound: what truncation discards.
    pub tail_mass_bound: f64,
    #[serde(skip)]
    pub rows: Vec<ReplicateRow>,
}

/// Statistic values for `replicates` independent datasets. Replicate `i`
/// draws from the seed `mix(seed, m, i)`, so the result does not depend on
/// the thread schedule.
#[allow(clippy::too_many_arguments)]
pub fn replicate_statistics(
    kind: StatisticKind,
    model: &MercerModel,
    target: &TargetFunction,
    noise: &NoiseSpec,
    lambda: f64,
    m: usize,
    replicates: usize,
    seed: u64,
) -> Result<Vec<f64>> {
    (0..replicates)
        .into_par_iter()
        .map(|i| {
            let ds = sample_dataset(model, target, noise, m, derive_seed(seed, &[m as u64, i as u64]))?;
            match kind {
                StatisticKind::SampleError => sample_error_stat(model, target, &ds, lambda),
                StatisticKind::OperatorDeviation => operator_deviation(model, &ds),
            }
        })
        .collect()
}

/// Compare precomputed statistics against the bound at confidence `1 - η`.
pub fn summarize_tail(
    kind: StatisticKind,
    model: &MercerModel,
    noise: &NoiseSpec,
    lambda: f64,
    m: usize,
    eta: f64,
    statistics: &[f64],
) -> Result<TailReport> {
    let bound = tail_bound(kind, model, noise, lambda, m, eta)?;
    let rows: Vec<ReplicateRow> = statistics
        .iter()
        .enumerate()
        .map(|(replicate, &statistic)| ReplicateRow {
            replicate,
            statistic,
            bound,
            violated: statistic > bound,
        })
        .collect();
    let violations = rows.iter().filter(|r| r.violated).count();
    let frequency = violations as f64 / rows.len().max(1) as f64;
    Ok(TailReport {
        kind,
        m,
        lambda,
        eta,
        bound,
        violations,
        frequency,
        passed: frequency <= eta,
        median: crate::numerics::median(statistics),
        tail_mass_bound: model.tail_mass_bound(),
        rows,
    })
}

/// Violation frequency of one inequality over seeded replicates.
#[allow(clippy::too_many_arguments)]
pub fn tail_test(
    kind: StatisticKind,
    model: &MercerModel,
    target: &TargetFunction,
    noise: &NoiseSpec,
    lambda: f64,
    m: usize,
    eta: f64,
    replicates: usize,
    seed: u64,
) -> Result<TailReport> {
    if !noise.certified {
        return Err(Error::Contract(
            "noise constants (M, Sigma) are not certified for the moment condition".into(),
        ));
    }
    if replicates < MIN_REPLICATES {
        return Err(Error::Parameter(format!(
            "tail test needs >= {MIN_REPLICATES} replicates, got {replicates}"
        )));
    }
    let stats = replicate_statistics(kind, model, target, noise, lambda, m, replicates, seed)?;
    summarize_tail(kind, model, noise, lambda, m, eta, &stats)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::index_fn::IndexFunction;
    use crate::mercer::{build_model, certify_noise, target_from_source, NoiseConfig, SourceConfig, SpectrumRule};

    fn setup(n: usize, sigma: f64) -> (MercerModel, TargetFunction, NoiseSpec) {
        let model = build_model(2.0, 1.0, 1.0, &SpectrumRule::Lower, 1, n).unwrap();
        let phi = IndexFunction::holder(0.5, model.kappa2()).unwrap();
        let g = model.source_coefficients(&SourceConfig::default()).unwrap();
        let target = target_from_source(&model, &phi, &g, 1.0).unwrap();
        let noise = certify_noise(&NoiseConfig::Gaussian { sigma }, 1).unwrap();
        (model, target, noise)
    }

    #[test]
    fn noiseless_sample_error_is_zero() {
        let (model, target, noise) = setup(16, 0.0);
        let ds = sample_dataset(&model, &target, &noise, 30, 1).unwrap();
        assert!(sample_error_stat(&model, &target, &ds, 0.1).unwrap() < 1e-14);
        let rep = tail_test(StatisticKind::SampleError, &model, &target, &noise, 0.1, 30, 0.1, 100, 3).unwrap();
        assert_eq!(rep.violations, 0);
    }

    #[test]
    fn single_mode_sample_error() {
        let model = MercerModel::from_spectrum(vec![1.0], 1).unwrap();
        let phi = IndexFunction::holder(0.5, model.kappa2()).unwrap();
        let target = target_from_source(&model, &phi, &DMatrix::zeros(1, 1), 1.0).unwrap();
        let eta1 = -0.8;
        let ds = Dataset::new(vec![2.0], DMatrix::from_vec(1, 1, vec![eta1])).unwrap();
        let v = sample_error_stat(&model, &target, &ds, 1.0).unwrap();
        assert!((v - 0.8 * 0.5f64.sqrt()).abs() < 1e-15);
        let doubled = Dataset::new(vec![2.0], DMatrix::from_vec(1, 1, vec![2.0 * eta1])).unwrap();
        assert!((sample_error_stat(&model, &target, &doubled, 1.0).unwrap() - 2.0 * v).abs() < 1e-15);
    }

    #[test]
    fn constant_feature_has_no_deviation() {
        let model = MercerModel::from_spectrum(vec![1.0], 1).unwrap();
        let ds = Dataset::new(vec![0.5, 0.5, 3.0], DMatrix::zeros(3, 1)).unwrap();
        assert_eq!(operator_deviation(&model, &ds).unwrap(), 0.0);
    }

    #[test]
    fn uncertified_noise_is_a_contract_error() {
        let (model, target, mut noise) = setup(16, 0.5);
        noise.certified = false;
        let err = tail_test(StatisticKind::SampleError, &model, &target, &noise, 0.1, 30, 0.1, 100, 3).unwrap_err();
        assert!(matches!(err, Error::Contract(_)));
        noise.certified = true;
        assert!(tail_test(StatisticKind::SampleError, &model, &target, &noise, 0.1, 30, 0.1, 10, 3).is_err());
    }

    #[test]
    fn deviation_below_bound_at_large_m() {
        let (model, target, noise) = setup(64, 0.5);
        let rep = tail_test(StatisticKind::OperatorDeviation, &model, &target, &noise, 0.1, 4096, 0.1, 100, 8).unwrap();
        assert!(rep.frequency <= 0.1);
    }

    #[test]
    fn loose_confidence_still_holds() {
        let (model, target, noise) = setup(64, 0.5);
        let rep = tail_test(StatisticKind::SampleError, &model, &target, &noise, 0.05, 256, 0.9, 100, 2).unwrap();
        assert!(rep.frequency <= 0.9);
        let tight = tail_bound(StatisticKind::SampleError, &model, &noise, 0.05, 256, 0.1).unwrap();
        assert!(rep.bound < tight);
    }

    #[test]
    fn statistics_are_schedule_independent() {
        let (model, target, noise) = setup(32, 0.5);
        let run = |threads| {
            rayon::ThreadPoolBuilder::new()
                .num_threads(threads)
                .build()
                .unwrap()
                .install(|| {
                    replicate_statistics(StatisticKind::SampleError, &model, &target, &noise, 0.1, 64, 20, 77).unwrap()
                })
        };
        assert_eq!(run(1), run(3));
    }
}
