use criterion::{black_box, criterion_group, criterion_main, BenchmarkId, Criterion};
use rate_lab::estimator::SolverPath;
use rate_lab::minimax::{default_amplitude, TwoPointMeasure};
use rate_lab::*;

fn config(n_trunc: usize) -> ModelConfig {
    ModelConfig {
        b: 2.0,
        alpha: 1.0,
        beta: 1.0,
        n_trunc,
        d: 1,
        spectrum_rule: SpectrumRule::Lower,
        source: SourceConfig::default(),
        noise: NoiseConfig::Gaussian { sigma: 0.5 },
    }
}

fn target(cfg: &ModelConfig, sign: f64) -> (MercerModel, IndexFunction, TargetFunction) {
    let model = cfg.build().unwrap();
    let phi = IndexFunction::new(IndexKind::Holder { r: 0.5 }, model.kappa2()).unwrap();
    let g = model.source_coefficients(&cfg.source).unwrap() * sign;
    let f = target_from_source(&model, &phi, &g, cfg.source.radius).unwrap();
    (model, phi, f)
}

fn dataset(n_trunc: usize, m: usize) -> (MercerModel, Dataset) {
    let cfg = config(n_trunc);
    let (model, _, f) = target(&cfg, 1.0);
    let noise = certify_noise(&cfg.noise, model.d()).unwrap();
    let ds = sample_dataset(&model, &f, &noise, m, 7).unwrap();
    (model, ds)
}

fn gram(c: &mut Criterion) {
    let mut group = c.benchmark_group("gram");
    group.sample_size(10);
    for m in [128usize, 512] {
        let (model, ds) = dataset(256, m);
        let kernel = Kernel::mercer(&model);
        group.bench_with_input(BenchmarkId::new("assemble_eigen", m), &m, |b, _| {
            b.iter(|| eigendecompose(&assemble_gram(&kernel, &ds.xs).unwrap()).unwrap())
        });
    }
    group.finish();
}

fn fit_paths(c: &mut Criterion) {
    let mut group = c.benchmark_group("fit");
    group.sample_size(10);
    let (model, ds) = dataset(128, 1024);
    let kernel = Kernel::mercer(&model);
    let filter = make_filter(&FilterConfig::Tikhonov, model.kappa2()).unwrap();
    for path in [SolverPath::Feature, SolverPath::Dual] {
        group.bench_function(format!("prepare_{path:?}"), |b| {
            b.iter(|| prepare(&ds, &kernel, path).unwrap())
        });
        let prepared = prepare(&ds, &kernel, path).unwrap();
        group.bench_function(format!("refit_{path:?}"), |b| {
            b.iter(|| prepared.fit(&filter, black_box(1e-2)).unwrap())
        });
    }
    group.finish();
}

fn filter_constants(c: &mut Criterion) {
    let filter = make_filter(&FilterConfig::IteratedTikhonov { nu: 3 }, 1.0).unwrap();
    c.bench_function("filters/verify_iterated", |b| {
        b.iter(|| verify_constants(&filter, 1.0, black_box(512)).unwrap())
    });
}

fn effdim(c: &mut Criterion) {
    let model = config(4096).build().unwrap();
    c.bench_function("effdim/n4096", |b| {
        b.iter(|| effective_dimension(model.eigenvalues(), black_box(1e-3)))
    });
}

fn kl(c: &mut Criterion) {
    let cfg = config(64);
    let (model, phi, f1) = target(&cfg, 1.0);
    let (_, _, f2) = target(&cfg, -1.0);
    let amp = default_amplitude(&model, &phi, 1.0);
    let p1 = TwoPointMeasure::new(&model, &f1, amp).unwrap();
    let p2 = TwoPointMeasure::new(&model, &f2, amp).unwrap();
    c.bench_function("minimax/kl_512", |b| {
        b.iter(|| kl_divergence(&model, &p1, &p2, black_box(512)).unwrap())
    });
}

criterion_group!(benches, gram, fit_paths, filter_constants, effdim, kl);
criterion_main!(benches);
