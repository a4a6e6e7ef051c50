use rand::Rng;
use rate_lab::minimax::*;
use rate_lab::rng::rng_from_seed;
use rate_lab::*;

fn model() -> MercerModel {
    build_model(2.0, 1.0, 1.0, &SpectrumRule::Lower, 1, 128).unwrap()
}

#[test]
fn packings_meet_size_and_distance() {
    for ell in [24, 48, 96] {
        let p = build_packing(ell, ell as u64).unwrap();
        p.verify().unwrap();
        assert!(p.len() >= packing_target(ell));
    }
}

#[test]
fn family_pairs_obey_separation_and_kl_bound() {
    let md = model();
    let phi = IndexFunction::holder(0.5, md.kappa2()).unwrap();
    let eps = 0.0005;
    assert!(ell_epsilon(&md, &phi, 1.0, eps).unwrap() >= 44);
    let packing = build_packing(44, 7).unwrap();
    let fam = adversarial_family(&md, &phi, 1.0, eps, &packing, false).unwrap();
    let l = default_amplitude(&md, &phi, 1.0);
    let measures: Vec<_> = fam.members.iter().map(|f| TwoPointMeasure::new(&md, f, l).unwrap()).collect();
    for i in 0..measures.len() {
        for j in 0..measures.len() {
            if i != j {
                let (rho, _) = md.norms_of_expansion(&(&fam.members[i].coeffs - &fam.members[j].coeffs));
                assert!(rho >= eps * (1.0 - 1e-10) && rho <= 2.0 * eps * (1.0 + 1e-10));
                let kl = kl_divergence(&md, &measures[i], &measures[j], KL_QUADRATURE).unwrap();
                assert!(kl.holds && kl.kl >= 0.0);
            }
        }
    }
}

#[test]
fn two_point_measure_has_target_mean() {
    let md = build_model(2.0, 1.0, 1.0, &SpectrumRule::Lower, 3, 16).unwrap();
    let phi = IndexFunction::holder(0.5, md.kappa2()).unwrap();
    let f = target_from_source(&md, &phi, &md.source_coefficients(&SourceConfig::default()).unwrap(), 1.0).unwrap();
    let l = default_amplitude(&md, &phi, 1.0);
    let p = TwoPointMeasure::new(&md, &f, l).unwrap();
    for x in [0.1, 1.9, 4.4] {
        let atoms = p.conditional(&md, x).unwrap();
        let total: f64 = atoms.iter().map(|a| a.weight).sum();
        assert!((total - 1.0).abs() < 1e-14);
        let mean = atom_mean(&atoms, l, 3);
        for (u, v) in mean.iter().zip(f.eval(&md, x)) {
            assert!((u - v).abs() < 1e-13);
        }
    }
}

#[test]
fn bayes_error_matches_simulation() {
    let mut rng = rng_from_seed(99);
    for case in 0..5 {
        let dim = rng.gen_range(1..5);
        let gamma: Vec<f64> = (0..dim).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let sigma = rng.gen_range(0.3..2.0);
        let exact = bayes_error(&gamma, sigma).unwrap();
        let sim = simulate_bayes_error(&gamma, sigma, 100_000, case);
        assert!((sim.error_rate - exact).abs() <= 3.0 * sim.standard_error, "case {case}");
    }
}

#[test]
fn estimator_cannot_beat_the_fano_bound() {
    let md = build_model(2.0, 1.0, 1.0, &SpectrumRule::Lower, 1, 64).unwrap();
    let phi = IndexFunction::holder(0.5, md.kappa2()).unwrap();
    let packing = build_packing(24, 1).unwrap();
    let eps = 0.001;
    let fam = adversarial_family(&md, &phi, 1.0, eps, &packing, false).unwrap();
    let l = default_amplitude(&md, &phi, 1.0);
    let bound = fano_bound(24, 32, eps, 1, l).unwrap();
    let kernel = Kernel::mercer(&md);
    let tik = make_filter(&FilterConfig::Tikhonov, md.kappa2()).unwrap();
    let check = empirical_fano_check(&md, &fam, l, 32, 60, bound.value, 5, |ds| fit(ds, &kernel, &tik, 0.1)).unwrap();
    assert!(check.passed, "{check:?}");
}
