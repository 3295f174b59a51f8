use choquard_core::ansatz::PowerLogProfile;
use choquard_core::exponents::{construct_candidate, derive_exponents, ProblemParams};
use choquard_core::grid::RadialGrid;
use choquard_core::odesolver::FitClass;
use choquard_core::verify::*;
use choquard_core::Error;

fn pp(s: &str) -> ProblemParams {
    s.parse().unwrap()
}

const CASE1: &str = "5,2,1.4,1.4,1,1";
const CRITICAL: &str = "5,2,1,2,1,3";
const CASE2: &str = "5,2,1.01,2.3,1,2.5";
const SUBCRITICAL: &str = "3,2,2,2,1.5,1";

#[test]
fn pointwise_inside_range_passes() {
    let cfg = VerifyConfig::default();
    for (tuple, gamma) in [(CASE1, 2.1), (SUBCRITICAL, 0.4)] {
        let m = verify_pointwise_inequality(&PowerLogProfile::power(gamma).unwrap(), &pp(tuple), &cfg).unwrap();
        assert!(m.kappa_star > 0.0 && m.pass, "{tuple}: {m:?}");
        assert!(m.grid.values().iter().all(|&x| x >= 0.0));
        assert_eq!(m.amplitude, (0.9 * m.kappa_star).min(1.0));
    }
}

#[test]
fn kappa_star_is_the_sharp_amplitude() {
    let p = pp(CASE1);
    let cfg = VerifyConfig::default();
    let m = verify_pointwise_inequality(&PowerLogProfile::power(2.1).unwrap(), &p, &cfg).unwrap();
    // LHS scales as kappa^{m-1} and RHS as kappa^{p+q}: recover kappa_star from the returned profiles.
    let a = m.amplitude;
    let recovered = m
        .lhs_profile
        .values()
        .iter()
        .zip(m.rhs_profile.values())
        .map(|(l, g)| ((l / a) / (g / a.powf(2.8))).powf(1.0 / 1.8))
        .fold(f64::INFINITY, f64::min);
    assert!((recovered / m.kappa_star_base - 1.0).abs() < 1e-12);
    assert!(m.kappa_star <= m.kappa_star_base && m.kappa_star >= 0.99 * m.kappa_star_base);
    // Independent of the amplitude carried by the input profile.
    let u3 = PowerLogProfile::new(3.0, 2.1, 0.0).unwrap();
    let m3 = verify_pointwise_inequality(&u3, &p, &cfg).unwrap();
    assert_eq!(m3.kappa_star, m.kappa_star);
}

#[test]
fn pointwise_above_sigma_degenerates() {
    let cfg = VerifyConfig::default();
    let m = verify_pointwise_inequality(&PowerLogProfile::power(2.5).unwrap(), &pp(CASE1), &cfg).unwrap();
    assert!(!m.pass && m.degenerate);
    assert_eq!(m.argmin_r, cfg.grid.refined().r_min);
    // LHS/RHS ~ r^{(p+q-m+1)(gamma - sigma)}, so kappa_star ~ r_min^{gamma - sigma}.
    let expected = 10f64.powf(-(2.5 - 20.0 / 9.0));
    assert!((m.kappa_star_refined / m.kappa_star_base / expected - 1.0).abs() < 0.1);
}

#[test]
fn pointwise_below_fundamental_exponent_is_negative() {
    let err = verify_pointwise_inequality(&PowerLogProfile::power(1.5).unwrap(), &pp(CASE1), &VerifyConfig::default())
        .unwrap_err();
    assert!(matches!(err, Error::NegativeLhs { .. }));
}

#[test]
fn pointwise_requires_existence() {
    let err = verify_pointwise_inequality(
        &PowerLogProfile::power(2.1).unwrap(),
        &pp("5,2,1.6,1.6,1,1"),
        &VerifyConfig::default(),
    )
    .unwrap_err();
    assert!(matches!(err, Error::Precondition(_)));
}

#[test]
fn double_inequality_all_branches() {
    let cfg = VerifyConfig::default();
    for tuple in [CASE1, CRITICAL, CASE2] {
        let d = verify_double_inequality(&pp(tuple), &cfg).unwrap();
        assert!(d.pass, "{tuple}: {d:?}");
        assert!(0.0 < d.b_hat && d.b_hat <= d.a_hat);
        assert!(d.spread_change < 0.1);
    }
    let d = verify_double_inequality(&pp(CASE1), &cfg).unwrap();
    // sigma p > beta: both sides are exact multiples of r^{beta - sigma(p+q)} near the origin.
    assert!(d.drift < 1e-3);
}

#[test]
fn double_inequality_guard_below_critical_dimension() {
    let err = verify_double_inequality(&pp(SUBCRITICAL), &VerifyConfig::default()).unwrap_err();
    assert!(matches!(err, Error::Precondition(_)));
}

#[test]
fn keller_osserman_examples() {
    let p = pp(CASE1);
    let cfg = VerifyConfig::default();
    let sigma = derive_exponents(&p).sigma;
    let radii = cfg.grid.radii().unwrap();
    let exact = RadialGrid::sample_on(radii.clone(), |r| 0.7 * r.powf(-sigma)).unwrap();
    let rep = keller_osserman_check(&exact, &p, &cfg).unwrap();
    assert!(rep.pass);
    assert!(rep.running_sup.iter().all(|&(_, s)| (s / 0.7 - 1.0).abs() < 1e-12));
    let slower = RadialGrid::sample_on(radii.clone(), |r| 0.7 * r.powf(-2.1)).unwrap();
    let rep = keller_osserman_check(&slower, &p, &cfg).unwrap();
    assert!(rep.pass && (rep.sup - 0.7).abs() < 1e-15);
    let control = RadialGrid::sample_on(radii, |r| r.powf(-sigma - 0.1)).unwrap();
    let rep = keller_osserman_check(&control, &p, &cfg).unwrap();
    assert!(!rep.pass);
    assert!((rep.last_growth - (10f64.powf(0.1) - 1.0)).abs() < 1e-9);
}

#[test]
fn keller_osserman_precondition() {
    let p = pp("5,3,1.5,2.4,0.5,1");
    let g = RadialGrid::sample(1e-4, 20, |r| 1.0 / r).unwrap();
    assert!(matches!(keller_osserman_check(&g, &p, &VerifyConfig::default()), Err(Error::Precondition(_))));
}

#[test]
fn cutoff_shape() {
    let c = Cutoff::QuinticSmoothstep;
    let big_r = 0.1;
    for &(r, want) in &[(0.04, 0.0), (0.05, 0.0), (0.1, 1.0), (0.15, 1.0), (0.2, 1.0), (0.4, 0.0), (0.5, 0.0)] {
        assert_eq!(c.value(r, big_r), want, "r={r}");
    }
    // C^2 joins: second differences vanish at the junctions.
    let h = 1e-6;
    for &x in &[0.05, 0.1, 0.2, 0.4] {
        let d2 = (c.value(x + h, big_r) - 2.0 * c.value(x, big_r) + c.value(x - h, big_r)) / (h * h);
        assert!(d2.abs() < 1.0, "x={x}: {d2}");
    }
    // |phi'| <= C / R: the smoothstep slope 15/8 over a ramp of width R/2 gives C = 15/4.
    let mut worst: f64 = 0.0;
    for i in 1..1000 {
        let x = 0.05 + 0.35 * i as f64 / 1000.0;
        worst = worst.max(((c.value(x + 1e-7, big_r) - c.value(x - 1e-7, big_r)) / 2e-7).abs());
    }
    assert!(worst * big_r <= 3.75 + 1e-6);
    assert!(worst * big_r >= 3.7);
}

fn apriori_cfg(p: &ProblemParams) -> AprioriCheckConfig {
    AprioriCheckConfig::for_params(p, &AprioriSettings::default(), Default::default()).unwrap()
}

#[test]
fn apriori_candidate_bounded_and_homogeneous() {
    let p = pp(CASE1);
    let cfg = apriori_cfg(&p);
    assert_eq!(cfg.lambda, 4.0);
    assert_eq!(cfg.ell, 1.4);
    assert_eq!(cfg.r_sweep.len(), 7);
    let u = construct_candidate(&p).unwrap();
    let a = apriori_ratio_check(&u, &p, &cfg).unwrap();
    assert!(a.pass && a.growth_exponent.abs() < 0.05);
    let b = apriori_ratio_check(&u.with_kappa(2.0).unwrap(), &p, &cfg).unwrap();
    let want = 2f64.powf(1.8);
    for (x, y) in a.samples.iter().zip(&b.samples) {
        assert!((y.lhs / (2f64.powf(2.8) * x.lhs) - 1.0).abs() < 1e-12);
        assert!((y.rhs / (2.0 * x.rhs) - 1.0).abs() < 1e-12);
        assert!((y.ratio / (want * x.ratio) - 1.0).abs() < 1e-12);
    }
}

#[test]
fn apriori_zero_forcing_for_fundamental_profile() {
    let p = pp(CASE1);
    let cfg = AprioriCheckConfig { forcing: Forcing::Zero, ..apriori_cfg(&p) };
    let phi = PowerLogProfile::power(2.0).unwrap();
    let r = apriori_ratio_check(&phi, &p, &cfg).unwrap();
    assert!(r.pass);
    assert!(r.samples.iter().all(|s| s.lhs == 0.0 && s.ratio == 0.0 && s.rhs > 0.0));
}

#[test]
fn apriori_detects_growth() {
    // gamma above sigma: the ratio grows like R^{-(gamma - sigma)(p+q-m+1)}.
    let p = pp(CASE1);
    let u = PowerLogProfile::power(2.5).unwrap();
    let r = apriori_ratio_check(&u, &p, &apriori_cfg(&p)).unwrap();
    assert!(!r.pass);
    assert!((r.growth_exponent - 0.5).abs() < 0.1, "{}", r.growth_exponent);
}

#[test]
fn apriori_lambda_must_exceed_placeholder() {
    let p = pp(CASE1);
    let s = AprioriSettings { lambda: Some(2.0), ..Default::default() };
    assert!(AprioriCheckConfig::for_params(&p, &s, Default::default()).is_err());
}

#[test]
fn dichotomy_pure_data() {
    let cfg = DichotomyConfig::default();
    let p = pp(CASE1);
    let f = dichotomy_pipeline(&p, BoundaryData::Fundamental, &cfg).unwrap();
    assert!((f.theta - 19.0 / 9.0).abs() < 1e-15);
    assert_eq!(f.data[0].fit.classification, FitClass::Fundamental);
    let s = dichotomy_pipeline(&p, BoundaryData::Strong, &cfg).unwrap();
    assert_eq!(s.data[0].fit.classification, FitClass::Strong);
    assert!((s.data[0].fit.slope + 20.0 / 9.0).abs() < 1e-4);

    let p2 = pp(CASE2);
    let s2 = dichotomy_pipeline(&p2, BoundaryData::Strong, &cfg).unwrap();
    assert_eq!(s2.theta, 0.0);
    assert_eq!(s2.data[0].fit.classification, FitClass::Strong);
    assert!((s2.data[0].fit.slope + 3.0 / 1.3).abs() < 1e-4);
}

#[test]
fn dichotomy_requires_dichotomy_regime() {
    let err = dichotomy_pipeline(&pp(CRITICAL), BoundaryData::Strong, &DichotomyConfig::default()).unwrap_err();
    assert!(matches!(err, Error::Precondition(_)));
}

#[test]
fn report_is_deterministic_and_round_trips() {
    let preset = Preset::Thm2Critical;
    let cfg = VerifyConfig::default();
    let a = run_verification(&preset.params(), preset.gamma(), Some(preset), &cfg).unwrap();
    let b = run_verification(&preset.params(), preset.gamma(), Some(preset), &cfg).unwrap();
    let (ja, jb) = (a.to_json().unwrap(), b.to_json().unwrap());
    assert_eq!(ja, jb);
    assert_eq!(VerificationReport::from_json(&ja).unwrap(), a);
    assert!(a.passed());
    assert_eq!(a.check("dichotomy").unwrap().status, CheckStatus::Skipped);
    assert!(a.check("dichotomy").unwrap().reason.is_some());
    for c in a.checks.iter().filter(|c| c.status != CheckStatus::Skipped) {
        assert!(!c.measured.is_empty(), "{}", c.name);
    }
    assert!(a.text_summary().contains("overall: PASS"));
}

#[test]
fn report_rejects_unknown_keys_and_schema() {
    let preset = Preset::Thm2Critical;
    let a = run_verification(&pp("5,2,1.6,1.6,1,1"), None, None, &VerifyConfig::default()).unwrap();
    assert!(!a.passed());
    assert!(a.checks.iter().skip(1).all(|c| c.status == CheckStatus::Skipped));
    let json = a.to_json().unwrap();
    let bad = json.replacen("\"schema\": 1", "\"schema\": 2", 1);
    assert!(VerificationReport::from_json(&bad).is_err());
    let extra = json.replacen("\"schema\": 1", "\"schema\": 1, \"extra\": 0", 1);
    assert!(VerificationReport::from_json(&extra).is_err());
    let cfg: Result<VerifyConfig, _> =
        serde_json::from_str(r#"{"grid": {"r_min": 1e-4, "nodes_per_decade": 8, "bogus": 1}}"#);
    assert!(cfg.is_err());
    let _ = preset;
}
