use proptest::prelude::*;

use choquard_core::exponents::ProblemParams;
use choquard_core::odesolver::{integrate_radial, IntegratorConfig, RadialEquation};
use choquard_core::Error;

fn equation(m: f64, theta: f64, c: f64, q: f64) -> RadialEquation {
    let p = ProblemParams::from_f64(5.0, m, 1.4, q, 1.0, 1.0).unwrap();
    RadialEquation::new(&p, theta, c, q).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn unflagged_solutions_stay_positive(
        m in 1.5f64..3.0,
        theta_frac in 0.0f64..0.9,
        c in 0.0f64..2.0,
        q_lift in 0.1f64..1.5,
        w0 in 0.1f64..5.0,
        v0 in -5.0f64..5.0,
    ) {
        let eq = equation(m, theta_frac * (m + 1.0), c, m - 1.0 + q_lift);
        match integrate_radial(&eq, 1.0, w0, v0, 1e-3, 40, &IntegratorConfig::default()) {
            Ok(sol) => prop_assert!(sol.grid.values().iter().all(|&w| w > 0.0)),
            Err(Error::Blowup(_)) | Err(Error::HitZero(_)) => {}
            Err(e) => prop_assert!(false, "unexpected error {e}"),
        }
    }

    #[test]
    fn flux_and_slope_invert_each_other(
        m in 1.5f64..4.0,
        r in 1e-4f64..1.0,
        slope in -1e3f64..1e3,
    ) {
        prop_assume!(slope.abs() > 1e-6);
        let eq = equation(m, 0.0, 1.0, m);
        let v = eq.flux_of_slope(r, slope);
        let (back, floored) = eq.slope_of_flux(r, v);
        prop_assert!(!floored);
        prop_assert!((back - slope).abs() <= 1e-12 * slope.abs(), "{back} vs {slope}");
    }
}
