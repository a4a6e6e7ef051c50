use rate_lab::concentration::replicate_statistics;
use rate_lab::numerics::median;
use rate_lab::*;

#[test]
fn operator_deviation_median_scales_like_inverse_root_m() {
    let md = build_model(2.0, 1.0, 1.0, &SpectrumRule::Lower, 1, 32).unwrap();
    let phi = IndexFunction::holder(0.5, md.kappa2()).unwrap();
    let f = target_from_source(&md, &phi, &md.source_coefficients(&SourceConfig::default()).unwrap(), 1.0).unwrap();
    let noise = certify_noise(&NoiseConfig::default(), 1).unwrap();
    let med = |m| {
        median(&replicate_statistics(StatisticKind::OperatorDeviation, &md, &f, &noise, 0.1, m, 100, 21).unwrap())
    };
    let ratio = med(256) / med(512);
    assert!((1.2..=1.7).contains(&ratio), "ratio {ratio}");
}

#[test]
fn sample_error_holds_at_default_confidence() {
    let md = build_model(2.0, 1.0, 1.0, &SpectrumRule::Lower, 2, 32).unwrap();
    let phi = IndexFunction::holder(0.5, md.kappa2()).unwrap();
    let f = target_from_source(&md, &phi, &md.source_coefficients(&SourceConfig::default()).unwrap(), 1.0).unwrap();
    let noise = certify_noise(&NoiseConfig::TwoPoint { amplitude: 4.0 }, 2).unwrap();
    assert!(noise.certified);
    let rep = tail_test(StatisticKind::SampleError, &md, &f, &noise, 0.05, 128, 0.1, 100, 4).unwrap();
    assert!(rep.passed, "{rep:?}");
}
