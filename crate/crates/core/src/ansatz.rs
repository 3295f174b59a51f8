//! Power-log profiles `kappa r^{-gamma} (log 5/r)^{-tau}` and the weighted
//! m-Laplace operator `div(|x|^{-alpha} |grad u|^{m-2} grad u)` acting on them.
//!
//! The operator has a closed form on this family; a finite-difference version
//! on sampled grids serves as an independent check of it.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exponents::ProblemParams;
use crate::grid::RadialGrid;

/// The constant inside the logarithm; keeps `log(5/r) >= log 5 > 0` on `(0, 1]`.
pub const LOG_SHIFT: f64 = 5.0;

/// `log(5/r)`.
#[inline]
pub fn log_factor(r: f64) -> f64 {
    (LOG_SHIFT / r).ln()
}

fn check_radius(r: f64) -> Result<()> {
    if r > 0.0 && r <= 1.0 {
        Ok(())
    } else {
        Err(Error::Domain(r))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PowerLogProfile {
    pub kappa: f64,
    pub gamma: f64,
    pub tau: f64,
}

impl PowerLogProfile {
    pub fn new(kappa: f64, gamma: f64, tau: f64) -> Result<Self> {
        let mut bad = Vec::new();
        if !(kappa > 0.0 && kappa.is_finite()) {
            bad.push(format!("kappa = {kappa} (kappa > 0 required)"));
        }
        if !(gamma > 0.0 && gamma.is_finite()) {
            bad.push(format!("gamma = {gamma} (gamma > 0 required)"));
        }
        if !(tau >= 0.0 && tau.is_finite()) {
            bad.push(format!("tau = {tau} (tau >= 0 required)"));
        }
        if bad.is_empty() {
            Ok(Self { kappa, gamma, tau })
        } else {
            Err(Error::Violation(bad))
        }
    }

    pub fn power(gamma: f64) -> Result<Self> {
        Self::new(1.0, gamma, 0.0)
    }

    pub fn with_kappa(self, kappa: f64) -> Result<Self> {
        Self::new(kappa, self.gamma, self.tau)
    }

    /// Value without the domain check; valid for any `0 < r < 5`.
    #[inline]
    pub fn value_unchecked(&self, r: f64) -> f64 {
        let mut v = self.kappa * r.powf(-self.gamma);
        if self.tau != 0.0 {
            v *= log_factor(r).powf(-self.tau);
        }
        v
    }

    /// Samples the profile on `count` log-spaced nodes of `[r_min, 1]`.
    pub fn sample(&self, r_min: f64, count: usize) -> Result<RadialGrid> {
        RadialGrid::sample(r_min, count, |r| self.value_unchecked(r))
    }
}

pub fn eval_profile(u: &PowerLogProfile, r: f64) -> Result<f64> {
    check_radius(r)?;
    Ok(u.value_unchecked(r))
}

/// Coefficients of the closed form
/// `kappa^{m-1} r^{power} L^{log} |tau - gamma L|^{m-2} (A L^2 + B L + C)`, `L = log(5/r)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct OperatorClosedForm {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub power_exponent: f64,
    pub log_exponent: f64,
    kappa_factor: f64,
    gamma: f64,
    tau: f64,
    m: f64,
}

impl OperatorClosedForm {
    pub fn new(u: &PowerLogProfile, params: &ProblemParams) -> Self {
        let (n, m, alpha) = (params.n(), params.m(), params.alpha());
        let (g, t) = (u.gamma, u.tau);
        let excess = n - m - alpha;
        Self {
            a: g * (g * (m - 1.0) - excess),
            b: t * (-2.0 * g * (m - 1.0) + excess),
            c: (m - 1.0) * t * (t + 1.0),
            power_exponent: -g * (m - 1.0) - m - alpha,
            log_exponent: -t * (m - 1.0) - m,
            kappa_factor: u.kappa.powf(m - 1.0),
            gamma: g,
            tau: t,
            m,
        }
    }

    /// `|tau - gamma L|`, the modulus of `r u'(r) / u(r) * L` up to sign.
    fn gradient_factor(&self, l: f64) -> f64 {
        (-self.gamma * l + self.tau).abs()
    }

    pub fn value(&self, r: f64) -> Result<f64> {
        check_radius(r)?;
        let l = log_factor(r);
        let grad = self.gradient_factor(l);
        if self.m < 2.0 && grad == 0.0 {
            return Err(Error::SingularGradient(r));
        }
        let grad_term = if self.m == 2.0 { 1.0 } else { grad.powf(self.m - 2.0) };
        let quad = (self.a * l + self.b) * l + self.c;
        Ok(self.kappa_factor * r.powf(self.power_exponent) * l.powf(self.log_exponent) * grad_term * quad)
    }

    /// Same expression with every coefficient replaced by its modulus; a
    /// natural magnitude against which cancellation in [`Self::value`] is judged.
    pub fn magnitude(&self, r: f64) -> Result<f64> {
        check_radius(r)?;
        let l = log_factor(r);
        let grad = self.gradient_factor(l);
        let grad_term = if self.m == 2.0 { 1.0 } else { grad.powf(self.m - 2.0) };
        let quad = (self.a.abs() * l + self.b.abs()) * l + self.c.abs();
        Ok(self.kappa_factor * r.powf(self.power_exponent) * l.powf(self.log_exponent) * grad_term * quad)
    }
}

pub fn weighted_m_laplace_closed_form(u: &PowerLogProfile, params: &ProblemParams, r: f64) -> Result<f64> {
    OperatorClosedForm::new(u, params).value(r)
}

/// Radial flux `r^{N-1-alpha} |u'|^{m-2} u'` expressed through `du/ds`, `s = log r`.
fn flux_from_log_derivative(r: f64, du_ds: f64, params: &ProblemParams) -> f64 {
    let (n, m, alpha) = (params.n(), params.m(), params.alpha());
    r.powf(n - alpha - m) * du_ds.abs().powf(m - 2.0) * du_ds
}

/// Finite-difference value of the operator at grid node `i`, together with
/// the magnitude of the two flux differences it combines.
fn fd_at_index(samples: &RadialGrid, params: &ProblemParams, h: f64, i: usize) -> (f64, f64) {
    let r = samples.radii();
    let u = samples.values();
    let s_i = r[i].ln();
    let r_plus = (s_i + 0.5 * h).exp();
    let r_minus = (s_i - 0.5 * h).exp();
    let v_plus = flux_from_log_derivative(r_plus, (u[i + 1] - u[i]) / h, params);
    let v_minus = flux_from_log_derivative(r_minus, (u[i] - u[i - 1]) / h, params);
    let scale = r[i].powf(-params.n()) / h;
    (scale * (v_plus - v_minus), scale * (v_plus.abs() + v_minus.abs()))
}

/// Second-order centred difference of `r^{1-N} (r^{N-1-alpha} |u'|^{m-2} u')'`
/// at the node `r` of a log-uniform grid.
pub fn weighted_m_laplace_fd(samples: &RadialGrid, params: &ProblemParams, r: f64) -> Result<f64> {
    let h = fd_step(samples)?;
    let i = interior_index(samples, r)?;
    Ok(fd_at_index(samples, params, h, i).0)
}

/// Like [`weighted_m_laplace_fd`], also returning the flux-difference magnitude
/// used to judge how close to zero a result is.
pub fn weighted_m_laplace_fd_scaled(samples: &RadialGrid, params: &ProblemParams, r: f64) -> Result<(f64, f64)> {
    let h = fd_step(samples)?;
    let i = interior_index(samples, r)?;
    Ok(fd_at_index(samples, params, h, i))
}

/// Operator values at every interior node, in node order.
pub fn weighted_m_laplace_fd_grid(samples: &RadialGrid, params: &ProblemParams) -> Result<RadialGrid> {
    let h = fd_step(samples)?;
    let n = samples.len();
    let radii = samples.radii()[1..n - 1].to_vec();
    let values = (1..n - 1).map(|i| fd_at_index(samples, params, h, i).0).collect();
    RadialGrid::new(radii, values)
}

fn fd_step(samples: &RadialGrid) -> Result<f64> {
    if samples.len() < 3 {
        return Err(Error::GridTooCoarse(format!("{} nodes; at least 3 needed", samples.len())));
    }
    samples.log_step(1e-6).ok_or_else(|| Error::GridTooCoarse("finite differences need log-uniform spacing".into()))
}

fn interior_index(samples: &RadialGrid, r: f64) -> Result<usize> {
    match samples.node_index(r) {
        Some(i) if i > 0 && i + 1 < samples.len() => Ok(i),
        Some(_) => Err(Error::GridTooCoarse(format!("r = {r} is a boundary node"))),
        None => Err(Error::GridTooCoarse(format!("r = {r} is not a grid node"))),
    }
}

/// `r^{-(N-m-alpha)/(m-1)}`, or `log(5/r)` when `N = m + alpha`.
pub fn fundamental_solution(params: &ProblemParams, r: f64) -> Result<f64> {
    check_radius(r)?;
    Ok(fundamental_unchecked(params, r))
}

pub(crate) fn fundamental_unchecked(params: &ProblemParams, r: f64) -> f64 {
    let excess = params.n() - params.m() - params.alpha();
    if params.geometry_is_log() {
        log_factor(r)
    } else {
        r.powf(-excess / (params.m() - 1.0))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pp(s: &str) -> ProblemParams {
        s.parse().unwrap()
    }

    #[test]
    fn eval_examples() {
        let u = PowerLogProfile::new(1.0, 2.0, 0.0).unwrap();
        assert_eq!(eval_profile(&u, 0.5).unwrap(), 4.0);
        let u = PowerLogProfile::new(1.0, 1.0, 1.0).unwrap();
        assert!((eval_profile(&u, 1.0).unwrap() - 1.0 / 5f64.ln()).abs() < 1e-15);
        let u = PowerLogProfile::new(2.0, 20.0 / 9.0, 0.0).unwrap();
        let v = eval_profile(&u, 0.1).unwrap();
        let want = 2.0 * 10f64.powf(20.0 / 9.0);
        assert!((v - want).abs() < 1e-12 * want);
        assert!((v - 333.62).abs() < 0.005);
    }

    #[test]
    fn eval_domain() {
        let u = PowerLogProfile::power(1.0).unwrap();
        assert!(matches!(eval_profile(&u, 0.0), Err(Error::Domain(_))));
        assert!(matches!(eval_profile(&u, 1.5), Err(Error::Domain(_))));
        assert!(PowerLogProfile::new(1.0, 0.0, 0.0).is_err());
        assert!(PowerLogProfile::new(-1.0, 1.0, -0.5).is_err());
    }

    #[test]
    fn fundamental_is_annihilated() {
        for s in ["5,2,1.4,1.4,1,1", "6,3,1.5,2.5,0.5,2", "4,1.5,1,1,0.7,1"] {
            let p = pp(s);
            let gamma = (p.n() - p.m() - p.alpha()) / (p.m() - 1.0);
            let u = PowerLogProfile::power(gamma).unwrap();
            for r in [1e-3, 0.1, 0.9] {
                assert_eq!(weighted_m_laplace_closed_form(&u, &p, r).unwrap(), 0.0);
            }
        }
    }

    #[test]
    fn closed_form_examples() {
        let p = pp("5,2,1.4,1.4,1,1");
        let u = PowerLogProfile::power(1.0).unwrap();
        let cf = OperatorClosedForm::new(&u, &p);
        assert_eq!(cf.a, -1.0);
        assert_eq!(cf.value(0.5).unwrap(), -16.0);

        let u = PowerLogProfile::new(1.0, 3.0, 0.5).unwrap();
        let v = weighted_m_laplace_closed_form(&u, &p, 1.0).unwrap();
        assert!((v - 1.6135).abs() < 5e-4, "{v}");
    }

    #[test]
    fn closed_form_rejects_vanishing_gradient() {
        // m < 2 with tau = gamma L at r = 1.
        let p = pp("5,1.5,1.4,1.4,1,1");
        let u = PowerLogProfile::new(1.0, 1.0, 5f64.ln()).unwrap();
        assert!(matches!(weighted_m_laplace_closed_form(&u, &p, 1.0), Err(Error::SingularGradient(_))));
    }

    #[test]
    fn homogeneity_in_kappa() {
        let p = pp("5,2.7,2,2,0.3,1");
        let u1 = PowerLogProfile::new(1.0, 3.0, 0.4).unwrap();
        let u2 = u1.with_kappa(2.0).unwrap();
        for r in [1e-3, 0.2, 1.0] {
            let a = weighted_m_laplace_closed_form(&u1, &p, r).unwrap();
            let b = weighted_m_laplace_closed_form(&u2, &p, r).unwrap();
            assert!((b / a - 2f64.powf(1.7)).abs() < 1e-14);
        }
    }

    #[test]
    fn positivity_above_fundamental_exponent() {
        let p = pp("5,2,1.4,1.4,1,1");
        let u = PowerLogProfile::power(2.05).unwrap();
        for r in crate::grid::log_spaced(1e-8, 1.0, 50).unwrap() {
            assert!(weighted_m_laplace_closed_form(&u, &p, r).unwrap() > 0.0);
        }
    }

    #[test]
    fn fundamental_solution_examples() {
        assert!((fundamental_solution(&pp("5,2,1.4,1.4,1,1"), 0.1).unwrap() - 100.0).abs() < 1e-10);
        assert!((fundamental_solution(&pp("3,2,1.4,1.4,1,1"), 1.0).unwrap() - 5f64.ln()).abs() < 1e-15);
        // N = m + alpha takes the logarithmic branch.
        assert!((fundamental_solution(&pp("4,3,2.5,2.5,1,1"), 0.25).unwrap() - 20f64.ln()).abs() < 1e-15);
        assert!(fundamental_solution(&pp("5,2,1.4,1.4,1,1"), 0.0).is_err());
    }

    #[test]
    fn fd_power_example() {
        let p = pp("5,2,1.4,1.4,1,1");
        // Grid chosen so that 0.5 is a node: 10^4 nodes on [0.5 * 2^{-k}, 1].
        let grid = crate::grid::log_spaced(1e-4, 1.0, 10_001).unwrap();
        let r_node = grid.iter().copied().min_by(|a, b| (a - 0.5).abs().total_cmp(&(b - 0.5).abs())).unwrap();
        let samples = RadialGrid::sample_on(grid, |r| 1.0 / r).unwrap();
        let fd = weighted_m_laplace_fd(&samples, &p, r_node).unwrap();
        let cf = weighted_m_laplace_closed_form(&PowerLogProfile::power(1.0).unwrap(), &p, r_node).unwrap();
        assert!(((fd - cf) / cf).abs() < 1e-4, "fd {fd} cf {cf}");
    }

    #[test]
    fn fd_errors() {
        let p = pp("5,2,1.4,1.4,1,1");
        let g = RadialGrid::sample(0.1, 2, |r| r).unwrap();
        assert!(matches!(weighted_m_laplace_fd(&g, &p, 0.1), Err(Error::GridTooCoarse(_))));
        let g = RadialGrid::sample(0.1, 11, |r| r).unwrap();
        assert!(weighted_m_laplace_fd(&g, &p, 0.1).is_err());
        assert!(weighted_m_laplace_fd(&g, &p, 0.1234).is_err());
        let uneven = RadialGrid::new(vec![0.1, 0.2, 0.5, 1.0], vec![1.0; 4]).unwrap();
        assert!(weighted_m_laplace_fd(&uneven, &p, 0.2).is_err());
    }
}
