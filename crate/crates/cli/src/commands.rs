use std::path::{Path, PathBuf};

use rate_lab::concentration::{replicate_statistics, summarize_tail};
use rate_lab::effdim::effdim_bound_check;
use rate_lab::harness::{Norm, Verdict};
use rate_lab::numerics::geometric_grid;
use rate_lab::*;
use serde::{Deserialize, Serialize};

use crate::io::{emit, load_config, num, seed_override, to_json, CliError, CliResult, OutDir};
use crate::{Command, FilterName, ModelArgs, RuleName, StatisticName};

/// Runs one subcommand; `Ok(false)` is a verdict failure.
pub fn dispatch(cmd: Command) -> CliResult<bool> {
    match cmd {
        Command::Fit {
            config,
            model,
            m,
            filter,
            rule,
            lambda,
            seed,
            out,
        } => {
            let cfg = match config {
                Some(p) => load_config(&p)?,
                None => FitConfig {
                    model: model.model_config(),
                    phi: model.phi(),
                    filter: filter_config(filter, 2, None)?,
                    rule: rule.into(),
                    lambda,
                    m,
                    seed,
                },
            };
            fit_cmd(cfg, out.as_deref())
        }
        Command::Sweep { config, out } => sweep_cmd(&config, out),
        Command::Effdim { model, points, out } => effdim_cmd(&model, points, out.as_deref()),
        Command::Concentration {
            config,
            model,
            statistic,
            m,
            eta,
            replicates,
            lambda,
            seed,
            out,
        } => {
            let cfg = match config {
                Some(p) => load_config(&p)?,
                None => ConcentrationConfig {
                    model: model.model_config(),
                    phi: model.phi(),
                    statistic: match statistic {
                        StatisticName::SampleError => StatisticKind::SampleError,
                        StatisticName::OperatorDeviation => StatisticKind::OperatorDeviation,
                    },
                    m,
                    eta,
                    replicates,
                    lambda,
                    seed,
                },
            };
            concentration_cmd(cfg, out.as_deref())
        }
        Command::LowerBound {
            config,
            model,
            epsilon,
            m,
            trials,
            rkhs_variant,
            ell,
            seed,
            out,
        } => {
            let cfg = match config {
                Some(p) => load_config(&p)?,
                None => LowerBoundConfig {
                    model: model.model_config(),
                    phi: model.phi(),
                    radius: model.radius,
                    epsilon,
                    m,
                    trials,
                    rkhs_variant,
                    ell,
                    seed,
                },
            };
            lower_bound_cmd(cfg, out.as_deref())
        }
        Command::Filters {
            check,
            kappa2,
            points,
            nu,
            tau,
        } => filters_cmd(check, kappa2, points, nu, tau),
        Command::Exponents { b, r } => {
            emit(&to_json(&rate_exponents(b, r)?)?)?;
            Ok(true)
        }
    }
}

impl ModelArgs {
    fn model_config(&self) -> ModelConfig {
        ModelConfig {
            b: self.b,
            alpha: self.alpha,
            beta: self.beta,
            n_trunc: self.n_trunc,
            d: self.d,
            spectrum_rule: SpectrumRule::Lower,
            source: SourceConfig {
                radius: self.radius,
                ..SourceConfig::default()
            },
            noise: NoiseConfig::Gaussian { sigma: self.sigma },
        }
    }

    fn phi(&self) -> IndexKind {
        IndexKind::Holder { r: self.r }
    }
}

impl From<RuleName> for ParamRule {
    fn from(r: RuleName) -> Self {
        match r {
            RuleName::Psi => ParamRule::Psi,
            RuleName::Theta => ParamRule::Theta,
            RuleName::HolderPsiClosed => ParamRule::HolderPsiClosed,
            RuleName::HolderThetaClosed => ParamRule::HolderThetaClosed,
        }
    }
}

fn filter_config(name: FilterName, nu: u32, tau: Option<f64>) -> CliResult<FilterConfig> {
    Ok(match name {
        FilterName::Tikhonov => FilterConfig::Tikhonov,
        FilterName::IteratedTikhonov => FilterConfig::IteratedTikhonov { nu },
        FilterName::Landweber => FilterConfig::Landweber { tau },
        FilterName::Cutoff => FilterConfig::Cutoff,
        FilterName::All => return Err(CliError("`all` names no single filter".into())),
    })
}

fn default_phi() -> IndexKind {
    IndexKind::Holder { r: 0.5 }
}

fn default_filter() -> FilterConfig {
    FilterConfig::Tikhonov
}

fn default_rule() -> ParamRule {
    ParamRule::Psi
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FitConfig {
    pub model: ModelConfig,
    #[serde(default = "default_phi")]
    pub phi: IndexKind,
    #[serde(default = "default_filter")]
    pub filter: FilterConfig,
    #[serde(default = "default_rule")]
    pub rule: ParamRule,
    #[serde(default)]
    pub lambda: Option<f64>,
    pub m: usize,
    #[serde(default)]
    pub seed: u64,
}

#[derive(Debug, Serialize)]
struct FitSummary<'a> {
    m: usize,
    lambda: f64,
    filter: &'a str,
    solver: SolverPath,
    rkhs_norm: f64,
    error_rho: f64,
    error_h: f64,
    seed: u64,
}

fn fit_cmd(mut cfg: FitConfig, out: Option<&Path>) -> CliResult<bool> {
    cfg.seed = seed_override(cfg.seed)?;
    let model = cfg.model.build()?;
    let phi = IndexFunction::new(cfg.phi.clone(), model.kappa2())?;
    let g = model.source_coefficients(&cfg.model.source)?;
    let target = target_from_source(&model, &phi, &g, cfg.model.source.radius)?;
    let noise = certify_noise(&cfg.model.noise, model.d())?;
    let ds = sample_dataset(&model, &target, &noise, cfg.m, cfg.seed)?;
    let lambda = match cfg.lambda {
        Some(l) => l,
        None => choose_lambda(cfg.rule, &make_rate_maps(&phi, model.b())?, cfg.m)?.lambda,
    };
    let filter = make_filter(&cfg.filter, model.kappa2())?;
    let prepared = prepare(&ds, &Kernel::mercer(&model), SolverPath::Auto)?;
    let fitted = prepared.fit(&filter, lambda)?;
    let (error_rho, error_h) = error_norms(&fitted, &model, &target)?;
    let label = filter.label();
    let summary = FitSummary {
        m: cfg.m,
        lambda,
        filter: &label,
        solver: prepared.path(),
        rkhs_norm: fitted.rkhs_norm(),
        error_rho,
        error_h,
        seed: cfg.seed,
    };
    if let Some(dir) = out {
        let dir = OutDir::create(dir)?;
        dir.write_json("fit.json", &serde_json::json!({ "summary": &summary, "estimator": fitted.export() }))?;
        let rows: Vec<Vec<String>> = prepared
            .spectrum()
            .iter()
            .enumerate()
            .map(|(i, v)| vec![(i + 1).to_string(), num(*v)])
            .collect();
        dir.write_csv("spectrum.csv", &["index", "eigenvalue"], &rows)?;
    }
    emit(&to_json(&summary)?)?;
    Ok(true)
}

fn sweep_cmd(config: &Path, out: Option<PathBuf>) -> CliResult<bool> {
    let mut cfg: ExperimentConfig = load_config(config)?;
    cfg.seed = seed_override(cfg.seed)?;
    if let Some(o) = out {
        cfg.output.dir = o.display().to_string();
    }
    let report = rate_sweep(&cfg)?;
    let dir = OutDir::create(Path::new(&cfg.output.dir))?;
    let upper = format!("q{}", num(100.0 * (1.0 - cfg.eta)).trim_end_matches(".0"));
    let rows: Vec<Vec<String>> = report
        .rows
        .iter()
        .map(|r| {
            vec![
                r.m.to_string(),
                num(r.lambda),
                r.norm.label().into(),
                num(r.q50),
                num(r.q_upper),
                num(r.margin),
                r.condition_holds.to_string(),
            ]
        })
        .collect();
    dir.write_csv(
        "sweep.csv",
        &["m", "lambda", "norm", "q50", &upper, "margin", "condition_holds"],
        &rows,
    )?;
    let curve: Vec<Vec<String>> = report
        .curve
        .iter()
        .map(|c| {
            vec![
                c.m.to_string(),
                c.norm.label().into(),
                num(c.lambda),
                num(c.predicted),
                num(c.observed_median),
            ]
        })
        .collect();
    dir.write_csv("curve.csv", &["m", "norm", "lambda", "predicted", "observed_median"], &curve)?;
    dir.write_json("report.json", &report)?;
    for v in &report.verdicts {
        let verdict = match v.verdict {
            Verdict::Pass => "PASS",
            Verdict::Fail => "FAIL",
            Verdict::NotApplicable => "n/a",
        };
        let theory = v.theory_exponent.map_or("n/a".to_string(), |e| format!("{:.4}", -e));
        emit(&format!(
            "{:<3} slope {:.4} ± {:.4} (theory {theory}): {verdict}",
            if v.norm == Norm::L2 { "L2" } else { "H" },
            v.fit.slope,
            v.fit.stderr
        ))?;
    }
    Ok(report.passed())
}

fn effdim_cmd(args: &ModelArgs, points: usize, out: Option<&Path>) -> CliResult<bool> {
    if points < 2 {
        return Err(CliError("--points must be >= 2".into()));
    }
    let model = args.model_config().build()?;
    let report = effdim_bound_check(&model, &geometric_grid(1e-6, model.kappa2(), points))?;
    if let Some(dir) = out {
        let dir = OutDir::create(dir)?;
        let opt = |v: Option<f64>| v.map_or(String::new(), num);
        let rows: Vec<Vec<String>> = report
            .points
            .iter()
            .map(|p| vec![num(p.lambda), num(p.value), opt(p.polynomial_bound), num(p.crude_bound)])
            .collect();
        dir.write_csv("effdim.csv", &["lambda", "effective_dimension", "polynomial_bound", "crude_bound"], &rows)?;
        dir.write_json("report.json", &report)?;
    }
    emit(&to_json(&serde_json::json!({
        "points": points,
        "all_hold": report.all_hold(),
        "max_polynomial_ratio": report.max_polynomial_ratio,
        "max_crude_ratio": report.max_crude_ratio,
    }))?)?;
    Ok(report.all_hold())
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConcentrationConfig {
    pub model: ModelConfig,
    #[serde(default = "default_phi")]
    pub phi: IndexKind,
    pub statistic: StatisticKind,
    pub m: usize,
    pub eta: f64,
    pub replicates: usize,
    #[serde(default)]
    pub lambda: Option<f64>,
    #[serde(default)]
    pub seed: u64,
}

fn concentration_cmd(mut cfg: ConcentrationConfig, out: Option<&Path>) -> CliResult<bool> {
    cfg.seed = seed_override(cfg.seed)?;
    if cfg.replicates < rate_lab::concentration::MIN_REPLICATES {
        return Err(CliError(format!(
            "replicates must be >= {}",
            rate_lab::concentration::MIN_REPLICATES
        )));
    }
    let model = cfg.model.build()?;
    let phi = IndexFunction::new(cfg.phi.clone(), model.kappa2())?;
    let g = model.source_coefficients(&cfg.model.source)?;
    let target = target_from_source(&model, &phi, &g, cfg.model.source.radius)?;
    let noise = certify_noise(&cfg.model.noise, model.d())?;
    if !noise.certified {
        return Err(CliError("noise constants are not certified for the moment condition".into()));
    }
    let lambda = match cfg.lambda {
        Some(l) => l,
        None => choose_lambda(ParamRule::Psi, &make_rate_maps(&phi, model.b())?, cfg.m)?.lambda,
    };
    let stats = replicate_statistics(cfg.statistic, &model, &target, &noise, lambda, cfg.m, cfg.replicates, cfg.seed)?;
    let report = summarize_tail(cfg.statistic, &model, &noise, lambda, cfg.m, cfg.eta, &stats)?;
    if let Some(dir) = out {
        let dir = OutDir::create(dir)?;
        let rows: Vec<Vec<String>> = report
            .rows
            .iter()
            .map(|r| vec![r.replicate.to_string(), num(r.statistic), num(r.bound), r.violated.to_string()])
            .collect();
        dir.write_csv("concentration.csv", &["replicate", "statistic", "bound", "violated"], &rows)?;
        dir.write_json("report.json", &report)?;
    }
    emit(&to_json(&report)?)?;
    Ok(report.passed)
}

fn lower_bound_cmd(mut cfg: LowerBoundConfig, out: Option<&Path>) -> CliResult<bool> {
    cfg.seed = seed_override(cfg.seed)?;
    let report = run_lower_bound(&cfg)?;
    if let Some(dir) = out {
        OutDir::create(dir)?.write_json("lower_bound.json", &report)?;
    }
    emit(&to_json(&report)?)?;
    Ok(report.passed)
}

fn filters_cmd(check: FilterName, kappa2: f64, points: usize, nu: u32, tau: Option<f64>) -> CliResult<bool> {
    let configs = match check {
        FilterName::All => vec![
            FilterConfig::Tikhonov,
            FilterConfig::IteratedTikhonov { nu },
            FilterConfig::Landweber { tau },
            FilterConfig::Cutoff,
        ],
        one => vec![filter_config(one, nu, tau)?],
    };
    let mut reports = Vec::new();
    for cfg in &configs {
        let filter = make_filter(cfg, kappa2)?;
        reports.push(verify_constants(&filter, kappa2, points)?);
    }
    emit(&to_json(&reports)?)?;
    Ok(reports.iter().all(|r| r.passed()))
}
