use rayon::prelude::*;
use serde::Serialize;

use super::slope::{fit_slope, SlopeFit};
use super::ExperimentConfig;
use crate::effdim::{check_theorem_condition, choose_lambda, rate_exponents, ParamRule};
use crate::error::{Error, Result};
use crate::estimator::{error_norms, prepare, SolverPath};
use crate::filters::make_filter;
use crate::gram::Kernel;
use crate::index_fn::{make_rate_maps, IndexFunction};
use crate::mercer::{certify_noise, sample_dataset, target_from_source, MercerModel};
use crate::numerics::{median, quantile};
use crate::rng::derive_seed;

/// Tail energy must stay below this fraction of the smallest predicted squared error.
pub const GATE_FRACTION: f64 = 0.01;
const MAX_GATE_N: usize = 1 << 16;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Norm {
    L2,
    H,
}

impl Norm {
    pub fn label(self) -> &'static str {
        match self {
            Norm::L2 => "L2",
            Norm::H => "H",
        }
    }
}

const NORMS: [Norm; 2] = [Norm::L2, Norm::H];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Verdict {
    #[serde(rename = "PASS")]
    Pass,
    #[serde(rename = "FAIL")]
    Fail,
    #[serde(rename = "n/a")]
    NotApplicable,
}

/// Unscaled predicted error at `λ`: `√λ φ(λ)` and `φ(λ)` under the `Ψ`
/// rule, `φ(λ)` in `L²` under the `Θ` rule, nothing in `H` under `Θ`.
pub fn predicted_error(rule: ParamRule, norm: Norm, lambda: f64, phi: &IndexFunction) -> Option<f64> {
    match (rule.is_psi(), norm) {
        (true, Norm::L2) => Some(lambda.sqrt() * phi.value(lambda)),
        (true, Norm::H) | (false, Norm::L2) => Some(phi.value(lambda)),
        (false, Norm::H) => None,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TruncationGate {
    pub n_trunc: usize,
    pub target_tail_energy: f64,
    pub smallest_predicted_sq: f64,
    pub passed: bool,
    /// `Σ_{n>N} t_n` bound; reported, not gated.
    pub kernel_tail_mass: f64,
}

fn lambdas(cfg: &ExperimentConfig, phi: &IndexFunction, b: f64) -> Result<Vec<(f64, bool)>> {
    let maps = make_rate_maps(phi, b)?;
    cfg.m_grid
        .iter()
        .map(|&m| choose_lambda(cfg.rule, &maps, m).map(|c| (c.lambda, c.clipped)))
        .collect()
}

/// Compare the energy the truncation drops against the predicted errors.
pub fn truncation_gate(cfg: &ExperimentConfig, model: &MercerModel, phi: &IndexFunction) -> Result<TruncationGate> {
    let tail = model.target_tail_energy(phi, &cfg.model.source);
    let mut smallest = f64::INFINITY;
    for (lambda, _) in lambdas(cfg, phi, model.b())? {
        for norm in NORMS {
            if let Some(p) = predicted_error(cfg.rule, norm, lambda, phi) {
                smallest = smallest.min(p * p);
            }
        }
    }
    Ok(TruncationGate {
        n_trunc: model.n_trunc(),
        target_tail_energy: tail,
        smallest_predicted_sq: smallest,
        passed: tail < GATE_FRACTION * smallest,
        kernel_tail_mass: model.tail_mass_bound(),
    })
}

/// Smallest power-of-two multiple of the configured `N_trunc` that passes the gate.
pub fn required_n_trunc(cfg: &ExperimentConfig) -> Result<Option<usize>> {
    let mut model_cfg = cfg.model.clone();
    while model_cfg.n_trunc <= MAX_GATE_N {
        let model = model_cfg.build()?;
        let phi = IndexFunction::new(cfg.phi.clone(), model.kappa2())?;
        if truncation_gate(cfg, &model, &phi)?.passed {
            return Ok(Some(model_cfg.n_trunc));
        }
        model_cfg.n_trunc *= 2;
    }
    Ok(None)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    pub m: usize,
    pub lambda: f64,
    pub norm: Norm,
    pub q50: f64,
    /// `(1 - η)`-quantile over replicates.
    pub q_upper: f64,
    pub margin: f64,
    pub condition_holds: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VerdictRow {
    pub norm: Norm,
    pub fit: SlopeFit,
    /// `e` in the predicted rate `m^{-e}`.
    pub theory_exponent: Option<f64>,
    /// `holder` or `predicted_curve`.
    pub exponent_source: Option<&'static str>,
    pub verdict: Verdict,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CurvePoint {
    pub m: usize,
    pub norm: Norm,
    pub lambda: f64,
    /// Predicted error scaled by the log-space least-squares constant.
    pub predicted: f64,
    pub observed_median: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepReport {
    pub config: ExperimentConfig,
    pub filter: String,
    pub kappa2: f64,
    pub gate: TruncationGate,
    pub any_lambda_clipped: bool,
    pub rows: Vec<SweepRow>,
    pub verdicts: Vec<VerdictRow>,
    pub curve: Vec<CurvePoint>,
}

impl SweepReport {
    /// No verdict is FAIL.
    pub fn passed(&self) -> bool {
        self.verdicts.iter().all(|v| v.verdict != Verdict::Fail)
    }
}

/// Error norms for every `m` in the grid and replicate, summarized per `m`,
/// with slope fits of the medians. Replicate `r` at size `m` draws from
/// `derive_seed(seed, [m, r])`, so output is independent of thread count.
pub fn rate_sweep(cfg: &ExperimentConfig) -> Result<SweepReport> {
    cfg.validate()?;
    let model = cfg.model.build()?;
    let phi = IndexFunction::new(cfg.phi.clone(), model.kappa2())?;
    let gate = truncation_gate(cfg, &model, &phi)?;
    if !gate.passed {
        let needed = required_n_trunc(cfg)?;
        return Err(Error::Truncation(format!(
            "target tail energy {:e} is not below {} of the smallest predicted squared error {:e}; {}",
            gate.target_tail_energy,
            GATE_FRACTION,
            gate.smallest_predicted_sq,
            match needed {
                Some(n) => format!("N_trunc >= {n} required"),
                None => format!("no N_trunc <= {MAX_GATE_N} suffices"),
            }
        )));
    }
    let filter = make_filter(&cfg.filter, model.kappa2())?;
    let g = model.source_coefficients(&cfg.model.source)?;
    let target = target_from_source(&model, &phi, &g, cfg.model.source.radius)?;
    let noise = certify_noise(&cfg.model.noise, model.d())?;
    let kernel = Kernel::mercer(&model);
    let kappa = model.kappa2().sqrt();
    let lam = lambdas(cfg, &phi, model.b())?;

    let mut rows = Vec::new();
    let mut medians: [Vec<f64>; 2] = [Vec::new(), Vec::new()];
    for (&m, &(lambda, _)) in cfg.m_grid.iter().zip(&lam) {
        let errors: Vec<(f64, f64)> = (0..cfg.replicates)
            .into_par_iter()
            .map(|rep| {
                let ds = sample_dataset(&model, &target, &noise, m, derive_seed(cfg.seed, &[m as u64, rep as u64]))?;
                let fitted = prepare(&ds, &kernel, SolverPath::Auto)?.fit(&filter, lambda)?;
                error_norms(&fitted, &model, &target)
            })
            .collect::<Result<_>>()?;
        let cond = check_theorem_condition(m, lambda, kappa, cfg.eta)?;
        for (k, norm) in NORMS.into_iter().enumerate() {
            let vals: Vec<f64> = errors.iter().map(|e| if k == 0 { e.0 } else { e.1 }).collect();
            let q50 = median(&vals);
            medians[k].push(q50);
            rows.push(SweepRow {
                m,
                lambda,
                norm,
                q50,
                q_upper: quantile(&vals, 1.0 - cfg.eta),
                margin: cond.margin,
                condition_holds: cond.holds,
            });
        }
        log::info!("m = {m}: lambda = {lambda:.4e}, median L2 = {:.4e}", medians[0].last().unwrap());
    }

    let ms: Vec<f64> = cfg.m_grid.iter().map(|&m| m as f64).collect();
    let holder = phi.holder_exponent();
    let exps = match holder {
        Some(r) if model.b() >= 1.0 => Some(rate_exponents(model.b(), r)?),
        _ => None,
    };
    let mut verdicts = Vec::new();
    let mut curve = Vec::new();
    for (k, norm) in NORMS.into_iter().enumerate() {
        let fit = fit_slope(&ms, &medians[k])?;
        let predicted: Option<Vec<f64>> = lam
            .iter()
            .map(|&(l, _)| predicted_error(cfg.rule, norm, l, &phi))
            .collect();
        let (theory, source) = match (&exps, &predicted) {
            (_, None) => (None, None),
            (Some(e), Some(_)) => {
                let v = match (cfg.rule.is_psi(), norm) {
                    (true, Norm::L2) => e.l2_upper_psi,
                    (true, Norm::H) => e.rkhs_upper,
                    (false, _) => e.l2_upper_theta,
                };
                (Some(v), Some("holder"))
            }
            (None, Some(p)) => (Some(-fit_slope(&ms, p)?.slope), Some("predicted_curve")),
        };
        let verdict = match theory {
            None => Verdict::NotApplicable,
            Some(e) if (fit.slope + e).abs() <= cfg.tolerance && fit.stderr <= cfg.tolerance / 2.0 => Verdict::Pass,
            Some(_) => Verdict::Fail,
        };
        verdicts.push(VerdictRow {
            norm,
            fit,
            theory_exponent: theory,
            exponent_source: source,
            verdict,
        });
        if let Some(p) = predicted {
            let log_tau = medians[k]
                .iter()
                .zip(&p)
                .map(|(o, q)| o.ln() - q.ln())
                .sum::<f64>()
                / p.len() as f64;
            for (i, &m) in cfg.m_grid.iter().enumerate() {
                curve.push(CurvePoint {
                    m,
                    norm,
                    lambda: lam[i].0,
                    predicted: log_tau.exp() * p[i],
                    observed_median: medians[k][i],
                });
            }
        }
    }
    Ok(SweepReport {
        config: cfg.clone(),
        filter: filter.label(),
        kappa2: model.kappa2(),
        gate,
        any_lambda_clipped: lam.iter().any(|l| l.1),
        rows,
        verdicts,
        curve,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::filters::FilterConfig;
    use crate::index_fn::IndexKind;
    use crate::mercer::{ModelConfig, SourceConfig, SourceKind};

    fn small_cfg() -> ExperimentConfig {
        let model: ModelConfig = serde_json::from_str(r#"{"b": 2.0, "N_trunc": 64}"#).unwrap();
        let mut cfg = ExperimentConfig::with_model(model);
        cfg.m_grid = vec![16, 32, 64, 128];
        cfg.replicates = 8;
        cfg
    }

    #[test]
    fn predicted_error_table() {
        let phi = IndexFunction::holder(0.5, 2.0).unwrap();
        assert_eq!(predicted_error(ParamRule::Psi, Norm::L2, 0.04, &phi), Some(0.2 * 0.2));
        assert_eq!(predicted_error(ParamRule::Psi, Norm::H, 0.04, &phi), Some(0.2));
        assert_eq!(predicted_error(ParamRule::Theta, Norm::L2, 0.04, &phi), Some(0.2));
        assert_eq!(predicted_error(ParamRule::Theta, Norm::H, 0.04, &phi), None);
    }

    #[test]
    fn sweep_shape_and_determinism() {
        let cfg = small_cfg();
        let a = rate_sweep(&cfg).unwrap();
        assert_eq!(a.rows.len(), 8);
        assert_eq!(a.verdicts.len(), 2);
        assert_eq!(a.curve.len(), 8);
        assert!(a.gate.passed);
        let one = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
        let b = one.install(|| rate_sweep(&cfg).unwrap());
        assert_eq!(serde_json::to_string(&a).unwrap(), serde_json::to_string(&b).unwrap());
    }

    #[test]
    fn theta_rule_has_no_rkhs_verdict() {
        let mut cfg = small_cfg();
        cfg.rule = ParamRule::Theta;
        let rep = rate_sweep(&cfg).unwrap();
        assert_eq!(rep.verdicts[1].verdict, Verdict::NotApplicable);
        assert!(rep.curve.iter().all(|c| c.norm == Norm::L2));
    }

    #[test]
    fn log_index_uses_predicted_curve() {
        let mut cfg = small_cfg();
        cfg.phi = IndexKind::Log { p: 1.0, nu: 2.0 };
        cfg.filter = FilterConfig::Cutoff;
        let rep = rate_sweep(&cfg).unwrap();
        assert_eq!(rep.verdicts[0].exponent_source, Some("predicted_curve"));
    }

    #[test]
    fn truncation_gate_refuses_coarse_models() {
        let mut cfg = small_cfg();
        cfg.model.n_trunc = 8;
        cfg.model.source = SourceConfig {
            kind: SourceKind::PowerLaw,
            radius: 1.0,
            s: 0.0,
            mode: 1,
        };
        cfg.phi = IndexKind::Holder { r: 0.0 };
        cfg.m_grid = vec![1024, 2048, 4096, 8192];
        let err = rate_sweep(&cfg).unwrap_err();
        assert!(matches!(err, Error::Truncation(ref msg) if msg.contains("N_trunc >=")), "{err:?}");
    }
}
