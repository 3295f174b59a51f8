//! Radial Riesz potentials on the unit ball.
//!
//! For a radial density `f` the potential reduces to
//! `A_beta * int_0^1 f(s) s^{N-1} K(r, s) ds`, where `K` is the spherical
//! integral of `|x - y|^{-e}` with `e = N - beta`. Both integrals are done by
//! adaptive Gauss-Kronrod; the kernel peak at `s = r` and the power-law
//! behaviour at the origin are absorbed by polynomial substitutions.

use std::cell::Cell;
use std::f64::consts::PI;

use num_rational::BigRational;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::ansatz::{log_factor, PowerLogProfile};
use crate::error::{Error, Result};
use crate::exponents::ProblemParams;
use crate::grid::RadialGrid;
use crate::quadrature::{integrate, Estimate, Tolerance};

/// Surface area of the unit sphere `S^{n-1}` in `R^n`.
pub fn sphere_area(n: u32) -> f64 {
    let h = 0.5 * n as f64;
    2.0 * PI.powf(h) / libm::tgamma(h)
}

/// `Gamma((N-beta)/2) / (Gamma(beta/2) pi^{N/2} 2^beta)`.
pub fn riesz_normalization(n: u32, beta: f64) -> f64 {
    let nf = n as f64;
    libm::tgamma(0.5 * (nf - beta)) / (libm::tgamma(0.5 * beta) * PI.powf(0.5 * nf) * 2f64.powf(beta))
}

/// Kernel `|x - y|^{-exponent}` in dimension `n`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct KernelSpec {
    n: u32,
    exponent: f64,
}

impl KernelSpec {
    pub fn new(n: u32, exponent: f64) -> Result<Self> {
        if n < 2 {
            return Err(Error::Precondition(format!("kernel quadrature needs N >= 2, got {n}")));
        }
        if !(exponent > 0.0 && exponent < n as f64) {
            return Err(Error::Precondition(format!("kernel exponent {exponent} outside (0, {n})")));
        }
        Ok(Self { n, exponent })
    }

    /// The Riesz kernel of order `beta`: exponent `N - beta`.
    pub fn riesz(params: &ProblemParams) -> Result<Self> {
        Self::new(params.dim(), params.dim() as f64 - params.beta())
    }

    pub fn dim(&self) -> u32 {
        self.n
    }

    pub fn exponent(&self) -> f64 {
        self.exponent
    }
}

/// Tolerances of the nested quadrature.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct QuadratureConfig {
    /// Relative tolerance of the angular integral.
    pub inner_rel: f64,
    /// Relative tolerance of the radial integral.
    pub outer_rel: f64,
    /// Absolute floor shared by both levels.
    pub abs_floor: f64,
    pub max_intervals: usize,
}

impl Default for QuadratureConfig {
    fn default() -> Self {
        Self { inner_rel: 1e-9, outer_rel: 1e-7, abs_floor: 1e-300, max_intervals: 4000 }
    }
}

impl QuadratureConfig {
    fn inner(&self) -> Tolerance {
        Tolerance { abs: self.abs_floor, rel: self.inner_rel, max_intervals: self.max_intervals }
    }

    fn outer(&self) -> Tolerance {
        Tolerance { abs: self.abs_floor, rel: self.outer_rel, max_intervals: self.max_intervals }
    }

    /// Both tolerances divided by `factor`.
    pub fn tightened(&self, factor: f64) -> Self {
        Self { inner_rel: self.inner_rel / factor, outer_rel: self.outer_rel / factor, ..*self }
    }
}

/// Spherical integral of `|x - y|^{-e}` over `|y| = s` at `|x| = r`, divided by `s^{N-1}`.
pub fn angular_kernel(spec: KernelSpec, r: f64, s: f64) -> Result<f64> {
    angular_kernel_estimate(spec, r, s, &QuadratureConfig::default()).map(|e| e.value)
}

pub fn angular_kernel_estimate(spec: KernelSpec, r: f64, s: f64, cfg: &QuadratureConfig) -> Result<Estimate> {
    if !(r >= 0.0 && s >= 0.0 && r.is_finite() && s.is_finite()) {
        return Err(Error::Domain(if r >= 0.0 { s } else { r }));
    }
    let (lo, hi) = if r <= s { (r, s) } else { (s, r) };
    kernel_with_gap(spec, lo, hi, hi - lo, cfg)
}

/// Kernel at radii `lo <= hi` whose gap `hi - lo` is supplied exactly by the caller.
fn kernel_with_gap(spec: KernelSpec, lo: f64, hi: f64, gap: f64, cfg: &QuadratureConfig) -> Result<Estimate> {
    let n = spec.n;
    let e = spec.exponent;
    if lo == 0.0 {
        if hi == 0.0 {
            return Err(Error::NonIntegrable("kernel evaluated at x = y = 0".into()));
        }
        let value = sphere_area(n) * hi.powf(-e);
        return Ok(Estimate { value, error: 0.0, evaluations: 0, converged: true });
    }
    let weight = sphere_area(n - 1);
    let rs = lo * hi;
    let sin_power = (n - 2) as i32;
    let est = if gap > 0.0 {
        let g2 = gap * gap;
        let f = |t: f64| {
            let h = (0.5 * t).sin();
            (g2 + 4.0 * rs * h * h).powf(-0.5 * e) * t.sin().powi(sin_power)
        };
        let width = gap / rs.sqrt();
        let mut points = vec![0.0];
        let mut t = width;
        while t < PI {
            points.push(t);
            t *= 2.0;
        }
        points.push(PI);
        integrate(f, &points, cfg.inner())
    } else {
        let nf = n as f64;
        if e >= nf - 1.0 {
            return Err(Error::NonIntegrable(format!(
                "kernel exponent {e} >= N-1 = {} is not integrable on the sphere through x",
                nf - 1.0
            )));
        }
        // theta = (pi/2) t^k with k (N-1-e) = 1 turns theta^{N-2-e} d theta into a constant.
        let k = 1.0 / (nf - 1.0 - e);
        let half = 0.5 * PI;
        let scale = rs.powf(-0.5 * e) * half.powf(nf - 1.0 - e) * k;
        let smooth = |theta: f64| {
            if theta == 0.0 {
                return 1.0;
            }
            let chord = 2.0 * (0.5 * theta).sin() / theta;
            chord.powf(-e) * (theta.sin() / theta).powi(sin_power)
        };
        let near = integrate(|t| scale * smooth(half * t.powf(k)), &[0.0, 1.0], cfg.inner());
        let far = integrate(
            |t| {
                let h = (0.5 * t).sin();
                (4.0 * rs * h * h).powf(-0.5 * e) * t.sin().powi(sin_power)
            },
            &[half, PI],
            cfg.inner(),
        );
        Estimate {
            value: near.value + far.value,
            error: near.error + far.error,
            evaluations: near.evaluations + far.evaluations,
            converged: near.converged && far.converged,
        }
    };
    if !est.converged || !est.value.is_finite() {
        return Err(Error::ToleranceNotMet { estimate: est.error, target: cfg.inner_rel * est.value.abs() });
    }
    Ok(Estimate { value: weight * est.value, error: weight * est.error, ..est })
}

/// Radial density entering a potential.
pub trait RadialDensity: Sync {
    fn value(&self, s: f64) -> f64;
    /// `b` such that `value(s) ~ s^{-b}` as `s -> 0`, up to slowly varying factors.
    fn origin_exponent(&self) -> f64;
    /// `value(s) * s^b`, which stays finite where `value` alone overflows.
    fn regular_part(&self, s: f64) -> f64 {
        self.value(s) * s.powf(self.origin_exponent())
    }
}

/// `coeff * s^{-exponent} * (log 5/s)^{-log_power}`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PowerLogDensity {
    pub coeff: f64,
    pub exponent: f64,
    pub log_power: f64,
}

impl PowerLogDensity {
    pub fn constant(c: f64) -> Self {
        Self { coeff: c, exponent: 0.0, log_power: 0.0 }
    }

    /// The density `u^power` of a power-log profile.
    pub fn profile_power(u: &PowerLogProfile, power: f64) -> Self {
        Self { coeff: u.kappa.powf(power), exponent: u.gamma * power, log_power: u.tau * power }
    }
}

impl RadialDensity for PowerLogDensity {
    fn value(&self, s: f64) -> f64 {
        let mut v = self.coeff;
        if self.exponent != 0.0 {
            v *= s.powf(-self.exponent);
        }
        if self.log_power != 0.0 {
            v *= log_factor(s).powf(-self.log_power);
        }
        v
    }

    fn origin_exponent(&self) -> f64 {
        self.exponent
    }

    fn regular_part(&self, s: f64) -> f64 {
        if self.log_power == 0.0 {
            self.coeff
        } else {
            self.coeff * log_factor(s).powf(-self.log_power)
        }
    }
}

/// Sampled density `f^power`, interpolated log-log and extended as a power law.
#[derive(Clone, Copy, Debug)]
pub struct GridDensity<'a> {
    grid: &'a RadialGrid,
    power: f64,
}

impl<'a> GridDensity<'a> {
    pub fn new(grid: &'a RadialGrid, power: f64) -> Result<Self> {
        if !(power >= 0.0 && power.is_finite()) {
            return Err(Error::Precondition(format!("power must be >= 0, got {power}")));
        }
        if let Some((r, v)) = grid.iter().find(|&(_, v)| v <= 0.0) {
            return Err(Error::Precondition(format!("density must be positive, got {v} at r = {r}")));
        }
        Ok(Self { grid, power })
    }
}

impl RadialDensity for GridDensity<'_> {
    fn value(&self, s: f64) -> f64 {
        if self.power == 0.0 {
            return 1.0;
        }
        self.grid.interpolate_positive(s).powf(self.power)
    }

    fn origin_exponent(&self) -> f64 {
        -self.grid.inner_log_slope().unwrap_or(0.0) * self.power
    }

    fn regular_part(&self, s: f64) -> f64 {
        // Below the grid the extension is an exact power, so the regular part is constant there.
        let s = s.max(self.grid.r_min());
        self.value(s) * s.powf(self.origin_exponent())
    }
}

/// One stretch of the radial integral, parametrized by `t in [0, 1]`.
#[derive(Clone, Copy, Debug)]
enum Segment {
    /// `s = c t^k` with `k (N - b - e) = 1`, where `e` is the kernel exponent at `r = 0` and zero otherwise.
    Origin { c: f64, k: f64, e: f64 },
    /// `s = r - w t^k`.
    Below { w: f64, k: f64 },
    /// `s = r + w t^k`.
    Above { w: f64, k: f64 },
    /// `s = a + (b - a) t`.
    Plain { a: f64, b: f64 },
}

/// `int_0^1 rho(s) s^{N-1} K(r, s) ds`.
pub fn radial_potential<D: RadialDensity + ?Sized>(
    density: &D,
    spec: KernelSpec,
    r: f64,
    cfg: &QuadratureConfig,
) -> Result<Estimate> {
    if !(0.0..=1.0).contains(&r) {
        return Err(Error::Domain(r));
    }
    let nf = spec.n as f64;
    let e = spec.exponent;
    let b = density.origin_exponent();
    if b >= nf {
        return Err(Error::NotIntegrable { exponent: b, threshold: nf });
    }
    let mut segments = Vec::new();
    if r == 0.0 {
        if b + e >= nf {
            return Err(Error::NotIntegrable { exponent: b + e, threshold: nf });
        }
        segments.push(Segment::Origin { c: 0.5, k: 1.0 / (nf - b - e), e });
        segments.push(Segment::Plain { a: 0.5, b: 1.0 });
    } else {
        let k_diag = if e > nf - 1.0 { 1.0 / (nf - e) } else { 2.0 };
        segments.push(Segment::Origin { c: 0.5 * r, k: 1.0 / (nf - b), e: 0.0 });
        segments.push(Segment::Below { w: 0.5 * r, k: k_diag });
        if r < 1.0 {
            let w = r.min(1.0 - r);
            segments.push(Segment::Above { w, k: k_diag });
            let mut a = r + w;
            while a < 1.0 {
                let next = (2.0 * a).min(1.0);
                segments.push(Segment::Plain { a, b: next });
                a = next;
            }
        }
    }

    let failure: Cell<Option<Error>> = Cell::new(None);
    let inner_rel = Cell::new(0.0f64);
    let kernel = |lo: f64, hi: f64, gap: f64| -> f64 {
        match kernel_with_gap(spec, lo, hi, gap, cfg) {
            Ok(k) => {
                if k.value > 0.0 {
                    inner_rel.set(inner_rel.get().max(k.error / k.value));
                }
                k.value
            }
            Err(err) => {
                let prev = failure.take();
                failure.set(prev.or(Some(err)));
                0.0
            }
        }
    };
    let body = |s: f64, lo: f64, hi: f64, gap: f64| density.value(s) * s.powf(nf - 1.0) * kernel(lo, hi, gap);
    let eval = |u: f64| -> f64 {
        let i = (u.floor() as usize).min(segments.len() - 1);
        let t = u - i as f64;
        match segments[i] {
            Segment::Origin { c, k, e: e0 } => {
                // rho(s) s^{N-1} K ds = k c^{N-b-e0} (rho(s) s^b) (K s^{e0}) dt exactly.
                let s = c * t.powf(k);
                let scale = k * c.powf(nf - b - e0);
                let k_weighted = if r == 0.0 {
                    sphere_area(spec.n)
                } else {
                    let (lo, hi) = if s <= r { (s, r) } else { (r, s) };
                    kernel(lo, hi, hi - lo)
                };
                scale * density.regular_part(s) * k_weighted
            }
            Segment::Below { w, k } => {
                let d = w * t.powf(k);
                if d == 0.0 {
                    return 0.0;
                }
                body(r - d, r - d, r, d) * w * k * t.powf(k - 1.0)
            }
            Segment::Above { w, k } => {
                let d = w * t.powf(k);
                if d == 0.0 {
                    return 0.0;
                }
                body(r + d, r, r + d, d) * w * k * t.powf(k - 1.0)
            }
            Segment::Plain { a, b } => {
                let s = a + (b - a) * t;
                body(s, r, s, s - r) * (b - a)
            }
        }
    };
    let points: Vec<f64> = (0..=segments.len()).map(|i| i as f64).collect();
    let est = integrate(eval, &points, cfg.outer());
    if let Some(err) = failure.take() {
        return Err(err);
    }
    if !est.converged || !est.value.is_finite() {
        return Err(Error::ToleranceNotMet { estimate: est.error, target: cfg.outer_rel * est.value.abs() });
    }
    let error = est.error + inner_rel.get() * est.value.abs();
    Ok(Estimate { error, ..est })
}

/// Potential `I_beta * f^power` sampled on a grid, with per-node error estimates.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConvolutionResult {
    pub grid: RadialGrid,
    pub quadrature_error_estimate: Vec<f64>,
    pub normalization: f64,
}

impl ConvolutionResult {
    /// `r,value,error_estimate` rows with a header line.
    pub fn to_csv_string(&self) -> String {
        let mut out = String::from("r,value,error_estimate\n");
        for ((r, v), e) in self.grid.iter().zip(&self.quadrature_error_estimate) {
            out.push_str(&format!("{r:.17e},{v:.17e},{e:.17e}\n"));
        }
        out
    }
}

/// `A_beta * int_{B_1} |x-y|^{beta-N} rho(|y|) dy` at every radius, nodes in parallel.
pub fn riesz_potential<D: RadialDensity + ?Sized>(
    density: &D,
    params: &ProblemParams,
    radii: &[f64],
    cfg: &QuadratureConfig,
) -> Result<ConvolutionResult> {
    if radii.first() == Some(&0.0) {
        return Err(Error::InvalidGrid("the center is not a grid node; use riesz_potential_at".into()));
    }
    let spec = KernelSpec::riesz(params)?;
    let norm = riesz_normalization(params.dim(), params.beta());
    let nodes: Vec<Estimate> =
        radii.par_iter().map(|&r| radial_potential(density, spec, r, cfg)).collect::<Result<_>>()?;
    let values = nodes.iter().map(|e| norm * e.value).collect();
    let errors = nodes.iter().map(|e| norm * e.error).collect();
    let grid = RadialGrid::new(radii.to_vec(), values)?;
    Ok(ConvolutionResult { grid, quadrature_error_estimate: errors, normalization: norm })
}

/// Single-radius potential, `r = 0` allowed.
pub fn riesz_potential_at<D: RadialDensity + ?Sized>(
    density: &D,
    params: &ProblemParams,
    r: f64,
    cfg: &QuadratureConfig,
) -> Result<Estimate> {
    let spec = KernelSpec::riesz(params)?;
    let norm = riesz_normalization(params.dim(), params.beta());
    let e = radial_potential(density, spec, r, cfg)?;
    Ok(Estimate { value: norm * e.value, error: norm * e.error, ..e })
}

/// `I_beta * f^power` on the nodes of `f`.
pub fn riesz_convolve_radial(f: &RadialGrid, params: &ProblemParams, power: f64) -> Result<ConvolutionResult> {
    riesz_convolve_radial_with(f, params, power, &QuadratureConfig::default())
}

pub fn riesz_convolve_radial_with(
    f: &RadialGrid,
    params: &ProblemParams,
    power: f64,
    cfg: &QuadratureConfig,
) -> Result<ConvolutionResult> {
    let density = GridDensity::new(f, power)?;
    riesz_potential(&density, params, f.radii(), cfg)
}

/// `I_beta * u^power` for a closed-form profile, evaluated on `radii`.
pub fn riesz_convolve_profile(
    u: &PowerLogProfile,
    params: &ProblemParams,
    power: f64,
    radii: &[f64],
    cfg: &QuadratureConfig,
) -> Result<ConvolutionResult> {
    riesz_potential(&PowerLogDensity::profile_power(u, power), params, radii, cfg)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum EnvelopeRegime {
    Super,
    Critical,
    Sub,
}

/// `int_{B_1} (log 5/|y|)^{-theta} |x-y|^{-a} |y|^{-b} dy` and its predicted size.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnvelopeCase {
    pub n: u32,
    pub a: f64,
    pub b: f64,
    pub theta: f64,
    pub regime: EnvelopeRegime,
}

impl EnvelopeCase {
    pub fn new(n: u32, a: f64, b: f64, theta: f64) -> Result<Self> {
        let nf = n as f64;
        if !(a > 0.0 && a < nf && b > 0.0 && b < nf) {
            return Err(Error::Precondition(format!("need a, b in (0, {n}), got a = {a}, b = {b}")));
        }
        if !(theta >= 0.0 && theta.is_finite()) {
            return Err(Error::Precondition(format!("need theta >= 0, got {theta}")));
        }
        let exact = |x: f64| BigRational::from_float(x).expect("finite");
        let sum = exact(a) + exact(b);
        let dim = BigRational::from_integer(n.into());
        let regime = match sum.cmp(&dim) {
            std::cmp::Ordering::Greater => EnvelopeRegime::Super,
            std::cmp::Ordering::Equal => EnvelopeRegime::Critical,
            std::cmp::Ordering::Less => EnvelopeRegime::Sub,
        };
        Ok(Self { n, a, b, theta, regime })
    }

    /// The excluded critical case `theta = 1`.
    pub fn theta_one(&self) -> bool {
        self.regime == EnvelopeRegime::Critical && self.theta == 1.0
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnvelopeBound {
    pub value: f64,
    /// Set for the critical case `theta = 1`, where the constant envelope is used.
    pub theta_one: bool,
}

pub fn bound_envelope(case: &EnvelopeCase, r: f64) -> Result<EnvelopeBound> {
    if !(r > 0.0 && r <= 1.0) {
        return Err(Error::Domain(r));
    }
    let l = log_factor(r);
    let value = match case.regime {
        EnvelopeRegime::Super => r.powf(case.n as f64 - case.a - case.b) * l.powf(-case.theta),
        EnvelopeRegime::Critical if case.theta_one() => 1.0,
        EnvelopeRegime::Critical => l.powf((1.0 - case.theta).max(0.0)),
        EnvelopeRegime::Sub => 1.0,
    };
    Ok(EnvelopeBound { value, theta_one: case.theta_one() })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnvelopeSample {
    pub r: f64,
    pub integral: f64,
    pub error_estimate: f64,
    pub envelope: f64,
    pub ratio: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnvelopeReport {
    pub case: EnvelopeCase,
    pub samples: Vec<EnvelopeSample>,
    pub min_ratio: f64,
    pub max_ratio: f64,
    pub factor: f64,
    pub theta_one: bool,
    pub pass: bool,
}

/// Default bound on `max_ratio / min_ratio`.
pub const ENVELOPE_FACTOR: f64 = 100.0;

pub fn verify_envelope(
    case: &EnvelopeCase,
    radii: &[f64],
    factor: f64,
    cfg: &QuadratureConfig,
) -> Result<EnvelopeReport> {
    let lo = radii.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = radii.iter().copied().fold(0.0, f64::max);
    if !(lo > 0.0 && hi <= 0.5 && hi / lo >= 1e3 * (1.0 - 1e-12)) {
        return Err(Error::Precondition(format!(
            "envelope radii must span at least three decades inside (0, 1/2], got [{lo}, {hi}]"
        )));
    }
    let spec = KernelSpec::new(case.n, case.a)?;
    let density = PowerLogDensity { coeff: 1.0, exponent: case.b, log_power: case.theta };
    let samples = radii
        .par_iter()
        .map(|&r| {
            let j = radial_potential(&density, spec, r, cfg)?;
            let env = bound_envelope(case, r)?.value;
            Ok(EnvelopeSample { r, integral: j.value, error_estimate: j.error, envelope: env, ratio: j.value / env })
        })
        .collect::<Result<Vec<_>>>()?;
    let min_ratio = samples.iter().map(|s| s.ratio).fold(f64::INFINITY, f64::min);
    let max_ratio = samples.iter().map(|s| s.ratio).fold(0.0, f64::max);
    let pass = min_ratio > 0.0 && max_ratio.is_finite() && max_ratio / min_ratio < factor;
    Ok(EnvelopeReport { case: *case, samples, min_ratio, max_ratio, factor, theta_one: case.theta_one(), pass })
}
