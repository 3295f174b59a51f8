//! End-to-end acceptance run: one PASS/FAIL line per criterion, nonzero exit on any FAIL.

use std::f64::consts::PI;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::time::Instant;

use num_rational::Rational64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use choquard_core::ansatz::{
    fundamental_solution, weighted_m_laplace_closed_form, weighted_m_laplace_fd_scaled, PowerLogProfile,
};
use choquard_core::exponents::{
    candidate_gamma_range, classify_existence, construct_candidate, derive_exponents, Condition, Existence,
    ProblemParams,
};
use choquard_core::grid::{log_spaced, RadialGrid};
use choquard_core::odesolver::FitClass;
use choquard_core::riesz::{
    riesz_potential, riesz_potential_at, verify_envelope, EnvelopeCase, PowerLogDensity, QuadratureConfig,
};
use choquard_core::verify::{
    apriori_ratio_check, dichotomy_pipeline, keller_osserman_check, verify_double_inequality,
    verify_pointwise_inequality, AprioriCheckConfig, BoundaryData, DichotomyConfig, Preset, VerifyConfig,
};
use choquard_core::Error;

const FD_CASES: usize = 50;
const FD_NODES: usize = 10_000;
const FD_REL: f64 = 1e-4;
/// Scaled residual regarded as pure round-off.
const ROUNDOFF_FLOOR: f64 = 1e-10;
const RIESZ_PROFILE_TOL: f64 = 1e-6;
const RIESZ_CENTER_TOL: f64 = 1e-8;
const ENVELOPE_SPREAD: f64 = 100.0;
const ENVELOPE_CLOSED_TOL: f64 = 1e-6;
const SPREAD_CHANGE_MAX: f64 = 0.10;
const DICHOTOMY_ANCHORS: usize = 8;
const SLOPE_TOL: f64 = 0.05;
const HOMOGENEITY_TOL: f64 = 1e-9;
const CLASSIFIER_CASES: usize = 10_000;

type Outcome = Result<String, String>;

fn ensure(ok: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg())
    }
}

fn pp(s: &str) -> ProblemParams {
    s.parse().unwrap()
}

fn gamma_fn(x: f64) -> f64 {
    libm::tgamma(x)
}

/// `Gamma((N-beta)/2) / (pi^{N/2} 2^beta Gamma(beta/2))`.
fn riesz_constant(n: u32, beta: f64) -> f64 {
    let nf = n as f64;
    gamma_fn((nf - beta) / 2.0) / (PI.powf(nf / 2.0) * 2f64.powf(beta) * gamma_fn(beta / 2.0))
}

fn sphere_area(n: u32) -> f64 {
    2.0 * PI.powf(n as f64 / 2.0) / gamma_fn(n as f64 / 2.0)
}

fn fd_closed_form_agreement() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed_0001);
    let grid = log_spaced(1e-4, 1.0, FD_NODES).map_err(|e| e.to_string())?;
    let mut worst: f64 = 0.0;
    for case in 0..FD_CASES {
        let n: u32 = rng.gen_range(3..=7);
        let m = rng.gen_range(1.3..3.0);
        let alpha = rng.gen_range(0.1..2.0);
        let params = ProblemParams::from_f64(n as f64, m, m, m, alpha, 1.0).map_err(|e| e.to_string())?;
        let phi = ((n as f64 - m - alpha) / (m - 1.0)).max(0.0);
        let gamma = phi + rng.gen_range(0.3..2.0);
        let tau = rng.gen_range(0.0..1.0f64).min(gamma);
        let u = PowerLogProfile::new(1.0, gamma, tau).map_err(|e| e.to_string())?;
        let samples = RadialGrid::sample_on(grid.clone(), |r| u.value_unchecked(r)).map_err(|e| e.to_string())?;
        for idx in [FD_NODES / 10, FD_NODES / 3, FD_NODES / 2, 3 * FD_NODES / 4, FD_NODES - 10] {
            let r = grid[idx];
            let cf = weighted_m_laplace_closed_form(&u, &params, r).map_err(|e| e.to_string())?;
            let (fd, _) = weighted_m_laplace_fd_scaled(&samples, &params, r).map_err(|e| e.to_string())?;
            let rel = ((fd - cf) / cf).abs();
            ensure(rel < FD_REL, || {
                format!("case {case}: N={n} m={m:.3} alpha={alpha:.3} gamma={gamma:.3} tau={tau:.3} r={r:.3e} rel {rel:.2e}")
            })?;
            worst = worst.max(rel);
        }
    }
    // The fundamental solution is annihilated: residual relative to the flux scale shrinks like h^2
    // until it reaches round-off.
    let mut shrink = Vec::new();
    for tuple in ["5,2,1.4,1.4,1,1", "4,3,2.5,2.5,1,1", "6,2.5,2,2,0.5,1"] {
        let params = pp(tuple);
        let mut prev = f64::INFINITY;
        for nodes in [1_000, 10_000, 100_000] {
            let g = log_spaced(1e-4, 1.0, nodes).map_err(|e| e.to_string())?;
            let samples = RadialGrid::try_sample_on(g.clone(), |r| fundamental_solution(&params, r))
                .map_err(|e| e.to_string())?;
            let mut resid: f64 = 0.0;
            for idx in [nodes / 10, nodes / 2, nodes - 10] {
                let (v, scale) = weighted_m_laplace_fd_scaled(&samples, &params, g[idx]).map_err(|e| e.to_string())?;
                resid = resid.max((v / scale).abs());
            }
            ensure(resid < prev / 10.0 || resid < ROUNDOFF_FLOOR, || {
                format!("{tuple}: Phi residual {resid:.2e} after {prev:.2e}")
            })?;
            prev = resid;
        }
        shrink.push(prev);
    }
    let last = shrink.iter().cloned().fold(0.0, f64::max);
    Ok(format!("{FD_CASES} cases, worst relative error {worst:.2e}; Phi residual down to {last:.1e}"))
}

fn riesz_exactness() -> Outcome {
    let cfg = QuadratureConfig::default();
    let params = pp("3,2,2,2,1.5,2");
    let radii = log_spaced(1e-3, 1.0, 64).map_err(|e| e.to_string())?;
    let res = riesz_potential(&PowerLogDensity::constant(1.0), &params, &radii, &cfg).map_err(|e| e.to_string())?;
    let mut worst: f64 = 0.0;
    for (r, v) in res.grid.iter() {
        let err = (v - (0.5 - r * r / 6.0)).abs();
        worst = worst.max(err);
    }
    ensure(worst < RIESZ_PROFILE_TOL, || format!("N=3 beta=2 profile error {worst:.2e}"))?;
    let mut center_worst: f64 = 0.0;
    for (tuple, n, beta) in [("3,2,2,2,1.5,2", 3, 2.0), ("5,2,1.4,1.4,1,1", 5, 1.0), ("4,2,2,2,1,1.5", 4, 1.5)] {
        let e =
            riesz_potential_at(&PowerLogDensity::constant(1.0), &pp(tuple), 0.0, &cfg).map_err(|e| e.to_string())?;
        let want = riesz_constant(n, beta) * sphere_area(n) / beta;
        let rel = ((e.value - want) / want).abs();
        ensure(rel < RIESZ_CENTER_TOL, || format!("center value N={n} beta={beta}: rel {rel:.2e}"))?;
        center_worst = center_worst.max(rel);
    }
    Ok(format!("profile error {worst:.1e} at 64 nodes, center relative error {center_worst:.1e}"))
}

fn envelopes() -> Outcome {
    let cfg = QuadratureConfig::default();
    let radii = log_spaced(1e-4, 0.5, 25).map_err(|e| e.to_string())?;
    let sets: [(u32, f64, f64, f64); 9] = [
        (3, 2.0, 1.5, 0.0),
        (4, 3.0, 2.0, 0.5),
        (5, 3.0, 3.0, 1.5),
        (3, 1.5, 1.5, 0.0),
        (4, 2.0, 2.0, 0.5),
        (5, 2.0, 3.0, 2.0),
        (3, 1.0, 1.0, 0.0),
        (4, 1.0, 2.0, 1.0),
        (5, 2.0, 2.0, 0.5),
    ];
    let mut worst: f64 = 0.0;
    let mut per_regime = std::collections::BTreeMap::new();
    for (n, a, b, theta) in sets {
        let case = EnvelopeCase::new(n, a, b, theta).map_err(|e| e.to_string())?;
        let rep = verify_envelope(&case, &radii, ENVELOPE_SPREAD, &cfg).map_err(|e| e.to_string())?;
        let spread = rep.max_ratio / rep.min_ratio;
        ensure(rep.pass, || format!("{:?} N={n} a={a} b={b} theta={theta}: spread {spread:.2}", case.regime))?;
        *per_regime.entry(format!("{:?}", case.regime)).or_insert(0) += 1;
        worst = worst.max(spread);
    }
    ensure(per_regime.len() == 3 && per_regime.values().all(|&k| k >= 3), || {
        format!("regime coverage {per_regime:?}")
    })?;
    let case = EnvelopeCase::new(3, 1.0, 1.0, 0.0).map_err(|e| e.to_string())?;
    let rep = verify_envelope(&case, &radii, ENVELOPE_SPREAD, &cfg).map_err(|e| e.to_string())?;
    let closed = rep.samples.iter().map(|s| (s.integral - 4.0 * PI * (1.0 - s.r / 2.0)).abs()).fold(0.0, f64::max);
    ensure(closed < ENVELOPE_CLOSED_TOL, || format!("N=3 closed form error {closed:.2e}"))?;
    Ok(format!("9 sets, worst spread {worst:.2}, N=3 closed-form error {closed:.1e}"))
}

fn pointwise_sufficiency() -> Outcome {
    let cfg = VerifyConfig::default();
    let mut detail = Vec::new();
    for (preset, gamma) in [(Preset::Thm2Case1, 2.1), (Preset::Thm1Subcritical, 0.4)] {
        let u = PowerLogProfile::power(gamma).map_err(|e| e.to_string())?;
        let m = verify_pointwise_inequality(&u, &preset.params(), &cfg).map_err(|e| e.to_string())?;
        let min_margin = m.grid.values().iter().cloned().fold(f64::INFINITY, f64::min);
        ensure(m.kappa_star > 0.0 && min_margin >= 0.0 && m.pass, || {
            format!("{}: kappa_star {} min margin {min_margin:e}", preset.name(), m.kappa_star)
        })?;
        detail.push(format!("{} kappa*={:.4}", preset.name(), m.kappa_star));
    }
    for (preset, gamma) in [(Preset::Thm2Case1, 2.5), (Preset::Thm1Subcritical, 1.6)] {
        let params = preset.params();
        let sigma = derive_exponents(&params).sigma;
        ensure(gamma > sigma, || format!("control gamma {gamma} is not above sigma {sigma}"))?;
        let u = PowerLogProfile::power(gamma).map_err(|e| e.to_string())?;
        match verify_pointwise_inequality(&u, &params, &cfg) {
            Ok(m) if m.pass => return Err(format!("{} control gamma={gamma} passed", preset.name())),
            Ok(m) => {
                detail.push(format!("control {} gamma={gamma} fails (degenerate={})", preset.name(), m.degenerate))
            }
            Err(e) => detail.push(format!("control {} gamma={gamma} fails ({e})", preset.name())),
        }
    }
    Ok(detail.join("; "))
}

fn double_inequality() -> Outcome {
    let cfg = VerifyConfig::default();
    let mut detail = Vec::new();
    for preset in [Preset::Thm2Case1, Preset::Thm2Critical, Preset::Thm2Case2] {
        let d = verify_double_inequality(&preset.params(), &cfg).map_err(|e| e.to_string())?;
        ensure(d.pass && d.spread_change < SPREAD_CHANGE_MAX, || {
            format!("{}: pass={} spread change {:.3}", preset.name(), d.pass, d.spread_change)
        })?;
        detail.push(format!(
            "{} a/b={:.3}/{:.3} change {:.1}%",
            preset.name(),
            d.a_hat,
            d.b_hat,
            100.0 * d.spread_change
        ));
    }
    Ok(detail.join("; "))
}

fn dichotomy() -> Outcome {
    let params = Preset::Thm2Case1.params();
    let mut cfg = DichotomyConfig::default();
    cfg.family.r_min = 1e-4;
    let rep = dichotomy_pipeline(&params, BoundaryData::Anchors { count: DICHOTOMY_ANCHORS }, &cfg)
        .map_err(|e| e.to_string())?;
    let sigma = derive_exponents(&params).sigma;
    let theta = derive_exponents(&params).theta_plus;
    ensure((rep.theta - theta).abs() < 1e-15, || format!("theta {} != {theta}", rep.theta))?;
    ensure(rep.data.len() == DICHOTOMY_ANCHORS, || format!("{} anchors solved", rep.data.len()))?;
    let (mut fundamental, mut strong) = (0, 0);
    for d in &rep.data {
        let s = d.fit.slope;
        match d.fit.classification {
            FitClass::Fundamental if ((s + 2.0) / 2.0).abs() < SLOPE_TOL => fundamental += 1,
            FitClass::Strong if ((s + sigma) / sigma).abs() < SLOPE_TOL => strong += 1,
            c => return Err(format!("{}: slope {s:.4} classified {c:?}", d.label)),
        }
    }
    Ok(format!("{fundamental} FUNDAMENTAL, {strong} STRONG, none UNDETERMINED"))
}

fn keller_osserman() -> Outcome {
    let cfg = VerifyConfig::default();
    let radii = cfg.grid.radii().map_err(|e| e.to_string())?;
    let mut detail = Vec::new();
    for preset in [Preset::Thm2Case1, Preset::Thm2Critical, Preset::Thm2Case2] {
        let params = preset.params();
        let u = construct_candidate(&params).map_err(|e| e.to_string())?;
        let g = RadialGrid::sample_on(radii.clone(), |r| u.value_unchecked(r)).map_err(|e| e.to_string())?;
        let rep = keller_osserman_check(&g, &params, &cfg).map_err(|e| e.to_string())?;
        ensure(rep.pass, || format!("{} candidate growth {:.3}", preset.name(), rep.last_growth))?;
        let sigma = derive_exponents(&params).sigma;
        let control = RadialGrid::sample_on(radii.clone(), |r| r.powf(-sigma - 0.1)).map_err(|e| e.to_string())?;
        let ctl = keller_osserman_check(&control, &params, &cfg).map_err(|e| e.to_string())?;
        ensure(!ctl.pass, || format!("{} control passed", preset.name()))?;
        detail.push(format!("{} sup {:.3} / control growth {:.3}", preset.name(), rep.sup, ctl.last_growth));
    }
    Ok(detail.join("; "))
}

fn apriori() -> Outcome {
    let params = Preset::Thm2Case1.params();
    let cfg = VerifyConfig::default();
    let acfg = AprioriCheckConfig::for_params(&params, &cfg.apriori, cfg.quadrature).map_err(|e| e.to_string())?;
    let radii: Vec<f64> = acfg.r_sweep.clone();
    let want_radii: Vec<f64> = (2..=8).map(|k| 2f64.powi(-k)).collect();
    ensure(radii == want_radii, || format!("sweep {radii:?}"))?;
    let u = construct_candidate(&params).map_err(|e| e.to_string())?;
    let base = apriori_ratio_check(&u, &params, &acfg).map_err(|e| e.to_string())?;
    ensure(base.pass, || format!("growth exponent {:.3}, contraction {:.3}", base.growth_exponent, base.contraction))?;
    let scaled = apriori_ratio_check(&u.with_kappa(3.0).map_err(|e| e.to_string())?, &params, &acfg)
        .map_err(|e| e.to_string())?;
    let factor = 3f64.powf(params.p() + params.q() - params.m() + 1.0);
    let dev = base
        .samples
        .iter()
        .zip(&scaled.samples)
        .map(|(a, b)| (b.ratio / (factor * a.ratio) - 1.0).abs())
        .fold(0.0, f64::max);
    ensure(dev < HOMOGENEITY_TOL, || format!("homogeneity deviation {dev:.2e}"))?;
    Ok(format!(
        "max ratio {:.4}, growth exponent {:.4}, homogeneity deviation {dev:.1e}",
        base.max_ratio, base.growth_exponent
    ))
}

/// Independent exact classification with 64-bit rationals.
fn oracle_verdict(
    n: i64,
    m: Rational64,
    p: Rational64,
    q: Rational64,
    alpha: Rational64,
    beta: Rational64,
) -> Existence {
    let one = Rational64::from_integer(1);
    let nr = Rational64::from_integer(n);
    let excess = nr - m - alpha;
    if excess <= Rational64::from_integer(0) {
        return Existence::Yes;
    }
    if p <= m - one {
        return Existence::Undetermined;
    }
    let max_ok = p.max(q) < nr * (m - one) / excess;
    let sum_ok = p + q < (nr + beta) * (m - one) / excess;
    let dim_ok = nr - Rational64::from_integer(2) * m < Rational64::from_integer(2) * alpha + beta;
    if max_ok && sum_ok && dim_ok {
        Existence::Yes
    } else {
        Existence::No
    }
}

fn fmt_rat(x: Rational64) -> String {
    format!("{}/{}", x.numer(), x.denom())
}

fn classifier_exactness() -> Outcome {
    // p + q sits exactly on (N+beta)(m-1)/(N-m-alpha); the other two conditions hold.
    for tuple in ["5,2,3/2,3/2,1,1", "6,2,4/3,4/3,1,2", "7,5/2,51/32,51/32,1/2,3/2", "5,2,1.2,1.8,1,1"] {
        let v = classify_existence(&pp(tuple));
        ensure(v.exists == Existence::No && v.failed_conditions == vec![Condition::SumPq], || {
            format!("{tuple}: {:?} {:?}", v.exists, v.failed_conditions)
        })?;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed_0009);
    let mut counts = [0usize; 3];
    for _ in 0..CLASSIFIER_CASES {
        let n: i64 = rng.gen_range(3..=8);
        let m = Rational64::new(rng.gen_range(5..=16), 4);
        let p = Rational64::new(rng.gen_range(1..=120), 20);
        let q = m - 1 + Rational64::new(rng.gen_range(1..=100), 20);
        let alpha = Rational64::new(rng.gen_range(1..=30), 10);
        let beta = Rational64::new(rng.gen_range(1..(10 * n)), 10);
        let tuple = [Rational64::from_integer(n), m, p, q, alpha, beta].map(fmt_rat).join(",");
        let params = pp(&tuple);
        let verdict = classify_existence(&params);
        let want = oracle_verdict(n, m, p, q, alpha, beta);
        ensure(verdict.exists == want, || format!("{tuple}: classifier {:?}, oracle {want:?}", verdict.exists))?;
        let range = candidate_gamma_range(&params);
        match want {
            Existence::Yes => {
                counts[0] += 1;
                let r = range.map_err(|e| format!("{tuple}: YES but {e}"))?;
                ensure(r.lower < r.upper, || format!("{tuple}: empty range"))?;
                ensure(construct_candidate(&params).is_ok(), || format!("{tuple}: no candidate"))?;
            }
            Existence::No => {
                counts[1] += 1;
                ensure(matches!(range, Err(Error::Precondition(_))), || format!("{tuple}: NO but range {range:?}"))?;
            }
            Existence::Undetermined => {
                counts[2] += 1;
                let expect = verdict.admits_construction();
                ensure(range.is_ok() == expect, || format!("{tuple}: UNDETERMINED, range {range:?}"))?;
            }
        }
    }
    Ok(format!(
        "4 boundary cases NO; {CLASSIFIER_CASES} random cases agree ({} YES, {} NO, {} UNDETERMINED)",
        counts[0], counts[1], counts[2]
    ))
}

fn main() {
    type Criterion = (&'static str, fn() -> Outcome);
    let criteria: [Criterion; 9] = [
        ("closed form vs finite differences", fd_closed_form_agreement),
        ("Riesz quadrature exactness", riesz_exactness),
        ("convolution envelopes", envelopes),
        ("pointwise sufficiency", pointwise_sufficiency),
        ("double inequality on three branches", double_inequality),
        ("dichotomy sweep", dichotomy),
        ("Keller-Osserman bound", keller_osserman),
        ("a-priori ratio", apriori),
        ("classifier exactness", classifier_exactness),
    ];
    let mut failed = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let outcome = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|p| {
            let msg = p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            Err(format!("panicked: {msg}"))
        });
        let secs = start.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => println!("PASS {}. {name}: {detail} [{secs:.1}s]", i + 1),
            Err(detail) => {
                failed += 1;
                println!("FAIL {}. {name}: {detail} [{secs:.1}s]", i + 1);
            }
        }
    }
    println!("acceptance: {} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
