use choquard_core::exponents::ProblemParams;
use choquard_core::grid::log_spaced;
use choquard_core::odesolver::*;
use choquard_core::Error;

fn params() -> ProblemParams {
    "5,2,1.4,1.4,1,1".parse().unwrap()
}

fn equation(theta: f64, c: f64) -> RadialEquation {
    RadialEquation::new(&params(), theta, c, 1.4).unwrap()
}

/// `lambda r^{-s}` with `lambda^{q-1} = s (s - 2) / C` for N = 5, m = 2, alpha = 1, theta = 0.
fn explicit(c: f64) -> (f64, f64) {
    let s: f64 = 7.5;
    ((s * (s - 2.0) / c).powf(1.0 / 0.4), s)
}

#[test]
fn reproduces_explicit_power_solution() {
    let e = equation(0.0, 1.0);
    let (lambda, s) = explicit(1.0);
    let w = |r: f64| lambda * r.powf(-s);
    let v0 = e.flux_of_slope(0.5, -s * w(0.5) / 0.5);
    let sol = integrate_radial(&e, 0.5, w(0.5), v0, 0.1, 9, &IntegratorConfig::default()).unwrap();
    for (r, got) in sol.grid.iter() {
        assert!((got / w(r) - 1.0).abs() < 1e-6, "r={r}");
    }
    assert!(sol.grid.values().iter().all(|&x| x > 0.0));
}

#[test]
fn flux_reconstruction_is_consistent() {
    let e = RadialEquation::new(&"5,3,1.4,2.2,0.5,1".parse().unwrap(), 0.3, 0.7, 2.2).unwrap();
    for &(r, v) in &[(0.3, -2.0), (0.01, -1e-5), (0.9, 3.0)] {
        let (dw, floored) = e.slope_of_flux(r, v);
        assert!(!floored);
        assert!((e.flux_of_slope(r, dw) / v - 1.0).abs() < 1e-14);
    }
    let (_, floored) = e.slope_of_flux(0.5, 1e-40);
    assert!(floored);
}

#[test]
fn fixed_step_order_is_five() {
    let e = equation(0.0, 0.0);
    let exact = 0.1f64.powi(-2);
    let err = |h: f64| {
        let cfg = IntegratorConfig { fixed_step: Some(h), ..IntegratorConfig::default() };
        let sol = integrate_radial(&e, 1.0, 1.0, -2.0, 0.1, 2, &cfg).unwrap();
        (sol.grid.values()[0] - exact).abs()
    };
    let (e1, e2) = (err(0.2), err(0.1));
    let order = (e1 / e2).log2();
    assert!(order > 4.5 && order < 5.8, "observed order {order}");
}

#[test]
fn blowup_and_zero_are_reported() {
    let e = equation(0.0, 1.0);
    let r = integrate_radial(&e, 1.0, 1.0, -1e6, 1e-4, 3, &IntegratorConfig::default());
    assert!(matches!(r, Err(Error::Blowup(_))));
    let e0 = equation(0.0, 0.0);
    let r = integrate_radial(&e0, 1.0, 1.0, 1.0, 0.1, 3, &IntegratorConfig::default());
    assert!(matches!(r, Err(Error::HitZero(_))));
}

#[test]
fn homogeneous_two_point_problem() {
    let e = equation(0.0, 0.0);
    let r_in = 1e-2;
    let bvp = RadialBVP::new(e, r_in, r_in.powi(-2), 1.0).unwrap();
    let nodes = log_spaced(r_in, 1.0, 21).unwrap();
    let sol = solve_bvp_shooting(&bvp, &nodes, &ShootingConfig::default()).unwrap();
    assert!(sol.residual < 1e-8);
    for (r, w) in sol.grid.iter() {
        assert!((w / r.powi(-2) - 1.0).abs() < 1e-8, "r={r}");
    }
    // Generic data: w = a + b r^{-2}.
    let bvp = RadialBVP::new(e, 0.1, 7.0, 2.0).unwrap();
    let sol = solve_bvp_shooting(&bvp, &log_spaced(0.1, 1.0, 11).unwrap(), &ShootingConfig::default()).unwrap();
    let b = 5.0 / 99.0;
    let a = 2.0 - b;
    for (r, w) in sol.grid.iter() {
        assert!((w - (a + b * r.powi(-2))).abs() < 1e-8 * w);
    }
}

#[test]
fn shooting_recovers_power_solution_and_scales() {
    let e = equation(0.0, 1.0);
    let (lambda, s) = explicit(1.0);
    let r_in = 0.2;
    let w = |r: f64| lambda * r.powf(-s);
    // Rescale so the outer value is 1: lambda r^{-s}/lambda solves the equation with C lambda^{q-1}.
    let e1 = equation(0.0, lambda.powf(0.4));
    let bvp = RadialBVP::new(e1, r_in, w(r_in) / lambda, 1.0).unwrap();
    let nodes = log_spaced(r_in, 1.0, 17).unwrap();
    let sol = solve_bvp_shooting(&bvp, &nodes, &ShootingConfig::default()).unwrap();
    for (r, got) in sol.grid.iter() {
        assert!((got / r.powf(-s) - 1.0).abs() < 1e-5, "r={r}");
    }
    // w -> 2w with C -> 2^{m-1-q} C solves the same problem.
    let e2 = equation(0.0, lambda.powf(0.4) * 2f64.powf(1.0 - 1.4));
    let bvp2 = RadialBVP::new(e2, r_in, 2.0 * w(r_in) / lambda, 2.0).unwrap();
    let sol2 = solve_bvp_shooting(&bvp2, &nodes, &ShootingConfig::default()).unwrap();
    for (a, b) in sol.grid.values().iter().zip(sol2.grid.values()) {
        assert!((b / (2.0 * a) - 1.0).abs() < 1e-7);
    }
    let _ = e;
}

#[test]
fn exact_fundamental_family() {
    let e = equation(0.0, 0.0);
    let cfg = FamilyConfig { r_min: 1e-3, ..FamilyConfig::default() };
    let lim = monotone_limit(&e, |r| r.powi(-2), 1.0, &cfg).unwrap();
    assert_eq!(lim.direction, Monotonicity::Constant);
    for (r, w) in lim.solution.grid.iter() {
        assert!((w * r * r - 1.0).abs() < 1e-7);
    }
    let previous = lim.inner_radii[lim.inner_radii.len() - 2];
    for ((r, _), c) in lim.solution.grid.iter().zip(&lim.converged) {
        assert_eq!(*c, r >= previous * (1.0 - 1e-12) || r == previous);
    }
}

#[test]
fn power_data_family_converges_to_power_profile() {
    let (lambda, s) = explicit(1.0);
    let e = equation(0.0, lambda.powf(0.4));
    let cfg = FamilyConfig { r_min: 1e-3, ..FamilyConfig::default() };
    let lim = monotone_limit(&e, |r| r.powf(-s), 1.0, &cfg).unwrap();
    for (r, w) in lim.solution.grid.iter() {
        assert!((w * r.powf(s) - 1.0).abs() < 1e-5, "r={r}");
    }
}

#[test]
fn bounded_data_gives_bounded_limit() {
    let e = equation(0.0, 1.0);
    let cfg = FamilyConfig { r_min: 1e-4, ..FamilyConfig::default() };
    let lim = monotone_limit(&e, |_| 1.0, 1.0, &cfg).unwrap();
    assert!(lim.solution.grid.values().iter().all(|&w| w > 0.0 && w <= 1.0 + 1e-9));
    let fit = fit_asymptotic_slope(&lim.solution.grid, (1e-4, 1e-3), &FitReference::for_equation(&e, 0.05)).unwrap();
    assert_eq!(fit.classification, FitClass::Bounded);
}

#[test]
fn dichotomy_sweep_theta_zero() {
    let e = equation(0.0, 1.0);
    let (lambda, s) = e.power_solution().unwrap();
    let reference = FitReference::for_equation(&e, 0.05);
    let cfg = FamilyConfig::default();
    for j in 0..8 {
        let t = j as f64 / 7.0;
        let g = |r: f64| (1.0 - t) * r.powi(-2) + t * 10.0 * lambda * r.powf(-s);
        let lim = monotone_limit(&e, g, g(1.0), &cfg).unwrap();
        let fit = fit_asymptotic_slope(&lim.solution.grid, (2e-2, 2e-1), &reference).unwrap();
        assert!(
            matches!(fit.classification, FitClass::Fundamental | FitClass::Strong),
            "anchor {j}: slope {}",
            fit.slope
        );
        assert!(lim.solution.grid.values().iter().all(|&w| w > 0.0));
    }
}
