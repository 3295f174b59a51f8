//! Certification pipelines: pointwise inequality margins, two-sided constants,
//! Keller-Osserman and a-priori ratio sweeps, and the asymptotic dichotomy.
//!
//! Every PASS/FAIL threshold is a field of [`VerifyConfig`].

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::ansatz::{eval_profile, OperatorClosedForm, PowerLogProfile};
use crate::error::{Error, Result};
use crate::exponents::{
    candidate_gamma_range, classify_existence, classify_profile, construct_candidate, derive_exponents,
    ConvolutionRegime, Geometry, ProblemParams, ProfileKind, RawParams,
};
use crate::grid::{log_spaced, RadialGrid};
use crate::odesolver::{
    fit_asymptotic_slope, monotone_limit, AsymptoticFit, FamilyConfig, FitClass, FitReference, Monotonicity,
    RadialEquation,
};
use crate::quadrature::{integrate, Tolerance};
use crate::riesz::{riesz_convolve_profile, sphere_area, QuadratureConfig};

pub const SCHEMA_VERSION: u32 = 1;

/// Log-uniform grid on `[r_min, 1]`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub r_min: f64,
    pub nodes_per_decade: usize,
}

impl Default for GridSpec {
    fn default() -> Self {
        Self { r_min: 1e-4, nodes_per_decade: 8 }
    }
}

impl GridSpec {
    pub fn radii(&self) -> Result<Vec<f64>> {
        if !(self.r_min > 0.0 && self.r_min < 1.0) || self.nodes_per_decade == 0 {
            return Err(Error::InvalidGrid(format!(
                "need 0 < r_min < 1 and nodes_per_decade > 0, got {} and {}",
                self.r_min, self.nodes_per_decade
            )));
        }
        let decades = -self.r_min.log10();
        let count = (decades * self.nodes_per_decade as f64).ceil() as usize + 1;
        log_spaced(self.r_min, 1.0, count.max(3))
    }

    /// One decade further in and twice the node density.
    pub fn refined(&self) -> Self {
        Self { r_min: self.r_min / 10.0, nodes_per_decade: 2 * self.nodes_per_decade }
    }
}

/// Thresholds and resolutions shared by all checks.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VerifyConfig {
    pub grid: GridSpec,
    pub quadrature: QuadratureConfig,
    /// Amplitude is set to `min(1, kappa_safety * kappa_star)`.
    pub kappa_safety: f64,
    /// Relative drop of `kappa_star` under refinement that counts as degeneration.
    pub kappa_refinement_tol: f64,
    /// Allowed relative change of `a_hat / b_hat` under refinement.
    pub spread_refinement_tol: f64,
    /// Allowed `|d log(ratio) / d log r|` over the innermost decades.
    pub drift_bound: f64,
    pub drift_decades: f64,
    /// Allowed relative growth of the running supremum of `r^sigma u` over the last decade.
    pub ko_stabilization_tol: f64,
    pub apriori: AprioriSettings,
    pub dichotomy: DichotomyConfig,
}

impl Default for VerifyConfig {
    fn default() -> Self {
        Self {
            grid: GridSpec::default(),
            quadrature: QuadratureConfig::default(),
            kappa_safety: 0.9,
            kappa_refinement_tol: 0.05,
            spread_refinement_tol: 0.10,
            drift_bound: 0.1,
            drift_decades: 2.0,
            ko_stabilization_tol: 0.05,
            apriori: AprioriSettings::default(),
            dichotomy: DichotomyConfig::default(),
        }
    }
}

fn check_unit_interval(name: &str, x: f64) -> Result<()> {
    if x > 0.0 && x <= 1.0 {
        Ok(())
    } else {
        Err(Error::Precondition(format!("{name} must lie in (0, 1], got {x}")))
    }
}

impl VerifyConfig {
    pub fn validate(&self) -> Result<()> {
        check_unit_interval("kappa_safety", self.kappa_safety)?;
        check_unit_interval("kappa_refinement_tol", self.kappa_refinement_tol)?;
        check_unit_interval("spread_refinement_tol", self.spread_refinement_tol)?;
        check_unit_interval("ko_stabilization_tol", self.ko_stabilization_tol)?;
        check_unit_interval("dichotomy.slope_tol", self.dichotomy.slope_tol)?;
        if !(self.drift_bound > 0.0 && self.drift_decades >= 1.0) {
            return Err(Error::Precondition("drift_bound > 0 and drift_decades >= 1 required".into()));
        }
        self.grid.radii().map(|_| ())
    }
}

fn unit_amplitude(u: &PowerLogProfile) -> Result<PowerLogProfile> {
    u.with_kappa(1.0)
}

/// `ell(r)` and `g(r)` for the unit-amplitude profile, with the largest relative quadrature error.
fn lhs_rhs(
    u: &PowerLogProfile,
    params: &ProblemParams,
    radii: &[f64],
    cfg: &QuadratureConfig,
) -> Result<(Vec<f64>, Vec<f64>, f64)> {
    let u1 = unit_amplitude(u)?;
    let op = OperatorClosedForm::new(&u1, params);
    let lhs: Vec<f64> = radii.iter().map(|&r| op.value(r)).collect::<Result<_>>()?;
    if let Some((&r, &value)) = radii.iter().zip(&lhs).find(|(_, &v)| v < 0.0) {
        return Err(Error::NegativeLhs { r, value });
    }
    let conv = riesz_convolve_profile(&u1, params, params.p(), radii, cfg)?;
    let mut rhs = Vec::with_capacity(radii.len());
    let mut worst: f64 = 0.0;
    for ((&r, &i), &e) in radii.iter().zip(conv.grid.values()).zip(&conv.quadrature_error_estimate) {
        rhs.push(i * eval_profile(&u1, r)?.powf(params.q()));
        worst = worst.max(e / i.abs());
    }
    Ok((lhs, rhs, worst))
}

fn homogeneity_gap(params: &ProblemParams) -> f64 {
    params.p() + params.q() - params.m() + 1.0
}

fn kappa_star_of(lhs: &[f64], rhs: &[f64], params: &ProblemParams) -> (f64, usize) {
    let e = 1.0 / homogeneity_gap(params);
    let mut best = (f64::INFINITY, 0);
    for (i, (l, g)) in lhs.iter().zip(rhs).enumerate() {
        let k = (l / g).powf(e);
        if k < best.0 {
            best = (k, i);
        }
    }
    best
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InequalityMargin {
    /// `LHS - RHS` at the chosen amplitude.
    pub grid: RadialGrid,
    /// Infimum over the base and refined grids.
    pub kappa_star: f64,
    pub kappa_star_base: f64,
    pub kappa_star_refined: f64,
    pub amplitude: f64,
    pub lhs_profile: RadialGrid,
    pub rhs_profile: RadialGrid,
    /// Node where `kappa_star` is attained.
    pub argmin_r: f64,
    /// The refined infimum drops by more than the tolerance and sits below the base grid.
    pub degenerate: bool,
    pub max_relative_quadrature_error: f64,
    pub pass: bool,
}

/// Largest admissible amplitude for `u` and the margins at `min(1, safety * kappa_star)`.
pub fn verify_pointwise_inequality(
    u: &PowerLogProfile,
    params: &ProblemParams,
    cfg: &VerifyConfig,
) -> Result<InequalityMargin> {
    let verdict = classify_existence(params);
    if !verdict.admits_construction() {
        return Err(Error::Precondition(format!("existence verdict is {:?}", verdict.exists)));
    }
    let radii = cfg.grid.radii()?;
    let (lhs, rhs, err) = lhs_rhs(u, params, &radii, &cfg.quadrature)?;
    let (kappa_star_base, at) = kappa_star_of(&lhs, &rhs, params);
    let fine = cfg.grid.refined().radii()?;
    let (lhs_f, rhs_f, err_f) = lhs_rhs(u, params, &fine, &cfg.quadrature)?;
    let (kappa_star_refined, at_f) = kappa_star_of(&lhs_f, &rhs_f, params);
    let (kappa_star, argmin_r) = if kappa_star_refined < kappa_star_base {
        (kappa_star_refined, fine[at_f])
    } else {
        (kappa_star_base, radii[at])
    };
    let degenerate = kappa_star_refined < (1.0 - cfg.kappa_refinement_tol) * kappa_star_base && fine[at_f] < radii[0];

    let amplitude = (cfg.kappa_safety * kappa_star).min(1.0);
    let (m, pq) = (params.m(), params.p() + params.q());
    let lhs_k: Vec<f64> = lhs.iter().map(|l| amplitude.powf(m - 1.0) * l).collect();
    let rhs_k: Vec<f64> = rhs.iter().map(|g| amplitude.powf(pq) * g).collect();
    let margins: Vec<f64> = lhs_k.iter().zip(&rhs_k).map(|(l, g)| l - g).collect();
    let pass = kappa_star > 0.0 && kappa_star.is_finite() && !degenerate && margins.iter().all(|&x| x >= 0.0);
    Ok(InequalityMargin {
        grid: RadialGrid::new(radii.clone(), margins)?,
        kappa_star,
        kappa_star_base,
        kappa_star_refined,
        amplitude,
        lhs_profile: RadialGrid::new(radii.clone(), lhs_k)?,
        rhs_profile: RadialGrid::new(radii.clone(), rhs_k)?,
        argmin_r,
        degenerate,
        max_relative_quadrature_error: err.max(err_f),
        pass,
    })
}

fn ls_slope(xs: &[f64], ys: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    sxy / sxx
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DoubleInequalityEstimate {
    pub candidate: PowerLogProfile,
    /// `LHS / RHS` on the base grid.
    pub ratio: RadialGrid,
    pub a_hat: f64,
    pub b_hat: f64,
    pub a_hat_refined: f64,
    pub b_hat_refined: f64,
    /// `|(a/b)_refined / (a/b) - 1|`.
    pub spread_change: f64,
    /// `|d log(ratio) / d log r|` over the innermost decades of the base grid.
    pub drift: f64,
    pub pass: bool,
}

fn ratio_extremes(
    u: &PowerLogProfile,
    params: &ProblemParams,
    radii: &[f64],
    q: &QuadratureConfig,
) -> Result<(Vec<f64>, f64, f64)> {
    let (lhs, rhs, _) = lhs_rhs(u, params, radii, q)?;
    let ratio: Vec<f64> = lhs.iter().zip(&rhs).map(|(l, g)| l / g).collect();
    let a = ratio.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let b = ratio.iter().cloned().fold(f64::INFINITY, f64::min);
    Ok((ratio, a, b))
}

/// Measures the constants `a >= b > 0` for the explicit candidate of `params`.
pub fn verify_double_inequality(params: &ProblemParams, cfg: &VerifyConfig) -> Result<DoubleInequalityEstimate> {
    let u = construct_candidate(params)?;
    if params.geometry() == Geometry::SubcriticalDim && params.convolution_regime() != ConvolutionRegime::Below {
        return Err(Error::Precondition("N < m+alpha requires the sigma p < beta branch".into()));
    }
    let radii = cfg.grid.radii()?;
    let (ratio, a_hat, b_hat) = ratio_extremes(&u, params, &radii, &cfg.quadrature)?;
    let fine = cfg.grid.refined().radii()?;
    let (_, a_f, b_f) = ratio_extremes(&u, params, &fine, &cfg.quadrature)?;
    let spread_change = ((a_f / b_f) / (a_hat / b_hat) - 1.0).abs();

    let inner = cfg.grid.r_min * 10f64.powf(cfg.drift_decades);
    let (xs, ys): (Vec<f64>, Vec<f64>) =
        radii.iter().zip(&ratio).filter(|(&r, _)| r <= inner * (1.0 + 1e-12)).map(|(&r, &x)| (r.ln(), x.ln())).unzip();
    let drift = if xs.len() >= 2 { ls_slope(&xs, &ys).abs() } else { f64::INFINITY };
    let pass = b_hat > 0.0 && a_hat.is_finite() && spread_change < cfg.spread_refinement_tol && drift < cfg.drift_bound;
    Ok(DoubleInequalityEstimate {
        candidate: u,
        ratio: RadialGrid::new(radii, ratio)?,
        a_hat,
        b_hat,
        a_hat_refined: a_f,
        b_hat_refined: b_f,
        spread_change,
        drift,
        pass,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct KellerOssermanReport {
    pub sigma: f64,
    /// `(r_j, sup_{r >= r_j} r^sigma u)` at decade edges `r_j = r_max 10^{-j}`.
    pub running_sup: Vec<(f64, f64)>,
    pub sup: f64,
    /// Relative growth of the running supremum over the last decade.
    pub last_growth: f64,
    pub pass: bool,
}

/// Supremum of `r^sigma u(r)` and whether it settles as the inner radius decreases.
pub fn keller_osserman_check(
    u: &RadialGrid,
    params: &ProblemParams,
    cfg: &VerifyConfig,
) -> Result<KellerOssermanReport> {
    if params.p() + params.q() <= 2.0 * (params.m() - 1.0) {
        return Err(Error::Precondition("Keller-Osserman bound needs p+q > 2(m-1)".into()));
    }
    let sigma = derive_exponents(params).sigma;
    let decades = (u.r_max() / u.r_min()).log10().floor() as i32;
    if decades < 2 {
        return Err(Error::GridTooCoarse(format!("{decades} full decades, need 2")));
    }
    let weighted: Vec<(f64, f64)> = u.iter().map(|(r, v)| (r, r.powf(sigma) * v)).collect();
    let running_sup: Vec<(f64, f64)> = (1..=decades)
        .map(|j| {
            let edge = u.r_max() * 10f64.powi(-j);
            let s = weighted
                .iter()
                .filter(|(r, _)| *r >= edge * (1.0 - 1e-12))
                .map(|p| p.1)
                .fold(f64::NEG_INFINITY, f64::max);
            (edge, s)
        })
        .collect();
    let n = running_sup.len();
    let (prev, last) = (running_sup[n - 2].1, running_sup[n - 1].1);
    let last_growth = last / prev - 1.0;
    Ok(KellerOssermanReport {
        sigma,
        running_sup,
        sup: last,
        last_growth,
        pass: last.is_finite() && last_growth <= cfg.ko_stabilization_tol,
    })
}

/// Polynomial cutoff built from the quintic smoothstep `6t^5 - 15t^4 + 10t^3`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Cutoff {
    QuinticSmoothstep,
}

fn smoothstep(t: f64) -> f64 {
    let t = t.clamp(0.0, 1.0);
    t * t * t * (t * (6.0 * t - 15.0) + 10.0)
}

impl Cutoff {
    /// Equal to 1 on `[R, 2R]`, supported in `[R/2, 4R]`.
    pub fn value(self, r: f64, big_r: f64) -> f64 {
        match self {
            Cutoff::QuinticSmoothstep => {
                if r <= big_r {
                    smoothstep((r - 0.5 * big_r) / (0.5 * big_r))
                } else if r <= 2.0 * big_r {
                    1.0
                } else {
                    smoothstep((4.0 * big_r - r) / (2.0 * big_r))
                }
            }
        }
    }
}

/// Right-hand side `f` fed into the estimate.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Forcing {
    /// `f = (I_beta * u^p) u^q`.
    Choquard,
    /// `f = 0`, as for the fundamental profile.
    Zero,
}

/// User-facing part of the a-priori sweep.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AprioriSettings {
    /// Cutoff power; `None` selects `2m`.
    pub lambda: Option<f64>,
    /// Sweep `R = 2^{-k}` for `k` in this inclusive range.
    pub k_range: (u32, u32),
    pub nodes_per_octave: usize,
    /// Allowed growth exponent of the ratio in `1/R`.
    pub growth_tol: f64,
    /// Largest contraction factor of successive ratio increments accepted as convergence.
    pub contraction_max: f64,
    /// Relative tolerance of the radial integrals.
    pub integral_rel: f64,
}

impl Default for AprioriSettings {
    fn default() -> Self {
        Self {
            lambda: None,
            k_range: (2, 8),
            nodes_per_octave: 12,
            growth_tol: 0.05,
            contraction_max: 0.95,
            integral_rel: 1e-10,
        }
    }
}

/// Lower bound the cutoff power must exceed. The estimate only asserts that some
/// threshold exists; `m` is the smallest value for which `|grad phi^lambda|^m`
/// is controlled by `phi^lambda` up to the factor `phi^{lambda - m}`.
pub fn lambda_placeholder(m: f64) -> f64 {
    m
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AprioriCheckConfig {
    pub ell: f64,
    pub lambda: f64,
    pub r_sweep: Vec<f64>,
    pub cutoff: Cutoff,
    pub forcing: Forcing,
    pub nodes_per_octave: usize,
    pub growth_tol: f64,
    pub contraction_max: f64,
    pub integral_rel: f64,
    pub quadrature: QuadratureConfig,
}

impl AprioriCheckConfig {
    pub fn for_params(
        params: &ProblemParams,
        settings: &AprioriSettings,
        quadrature: QuadratureConfig,
    ) -> Result<Self> {
        let m = params.m();
        let ell = 0.5 * (params.p() + params.q());
        if ell <= m - 1.0 {
            return Err(Error::Precondition(format!("ell = (p+q)/2 = {ell} must exceed m-1 = {}", m - 1.0)));
        }
        let lambda = settings.lambda.unwrap_or(2.0 * m);
        if lambda <= lambda_placeholder(m) {
            return Err(Error::Precondition(format!("lambda = {lambda} must exceed {}", lambda_placeholder(m))));
        }
        let (k0, k1) = settings.k_range;
        if k0 < 2 || k1 < k0 + 2 {
            return Err(Error::Precondition(format!("need 2 <= k0 and three sweep radii, got {k0}..={k1}")));
        }
        if settings.nodes_per_octave < 2 {
            return Err(Error::Precondition("nodes_per_octave must be at least 2".into()));
        }
        Ok(Self {
            ell,
            lambda,
            r_sweep: (k0..=k1).map(|k| 2f64.powi(-(k as i32))).collect(),
            cutoff: Cutoff::QuinticSmoothstep,
            forcing: Forcing::Choquard,
            nodes_per_octave: settings.nodes_per_octave,
            growth_tol: settings.growth_tol,
            contraction_max: settings.contraction_max,
            integral_rel: settings.integral_rel,
            quadrature,
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AprioriSample {
    pub big_r: f64,
    pub lhs: f64,
    pub rhs: f64,
    pub ratio: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AprioriReport {
    pub samples: Vec<AprioriSample>,
    /// Least-squares slope of `log ratio` against `log(1/R)`.
    pub growth_exponent: f64,
    /// Geometric mean of `|d_{k+1} / d_k|` over the last increments `d_k` of the ratio.
    pub contraction: f64,
    /// Last ratio plus the geometric tail of the increments; infinite without contraction.
    pub extrapolated_limit: f64,
    pub max_ratio: f64,
    pub pass: bool,
}

/// Both sides of the local integral estimate for each `R` in the sweep.
pub fn apriori_ratio_check(
    u: &PowerLogProfile,
    params: &ProblemParams,
    cfg: &AprioriCheckConfig,
) -> Result<AprioriReport> {
    let n = params.n();
    let m = params.m();
    let alpha = params.alpha();
    let area = sphere_area(params.dim());
    let r_lo = cfg.r_sweep.iter().cloned().fold(f64::INFINITY, f64::min) / 2.0;
    let r_hi = (4.0 * cfg.r_sweep.iter().cloned().fold(0.0, f64::max)).min(1.0);
    let octaves = (r_hi / r_lo).log2();
    let count = (octaves * cfg.nodes_per_octave as f64).ceil() as usize + 1;
    let nodes = log_spaced(r_lo, r_hi, count)?;
    let potential = match cfg.forcing {
        Forcing::Choquard => Some(riesz_convolve_profile(u, params, params.p(), &nodes, &cfg.quadrature)?.grid),
        Forcing::Zero => None,
    };
    let tol = Tolerance::relative(cfg.integral_rel);
    let weight = |r: f64, big_r: f64| cfg.cutoff.value(r, big_r).powf(cfg.lambda) * r.powf(n - 1.0);
    let q = params.q();
    let mut samples = Vec::with_capacity(cfg.r_sweep.len());
    for &big_r in &cfg.r_sweep {
        let (a, b) = (0.5 * big_r, (4.0 * big_r).min(1.0));
        let mut points = vec![a, big_r, 2.0 * big_r, b];
        if let Some(pot) = &potential {
            points.extend(pot.radii().iter().filter(|&&r| r > a && r < b));
        }
        points.sort_by(f64::total_cmp);
        points.dedup();
        let lhs = match &potential {
            Some(pot) => {
                let est = integrate(
                    |r| pot.interpolate_positive(r) * u.value_unchecked(r).powf(q) * weight(r, big_r),
                    &points,
                    tol,
                );
                if !est.converged {
                    return Err(Error::ToleranceNotMet {
                        estimate: est.error,
                        target: cfg.integral_rel * est.value.abs(),
                    });
                }
                area * est.value
            }
            None => 0.0,
        };
        let mass = integrate(|r| u.value_unchecked(r).powf(cfg.ell) * weight(r, big_r), &points, tol);
        if !mass.converged {
            return Err(Error::ToleranceNotMet { estimate: mass.error, target: cfg.integral_rel * mass.value.abs() });
        }
        let scale = big_r.powf(n - m - alpha - (m - 1.0) / cfg.ell * n);
        let rhs = scale * (area * mass.value).powf((m - 1.0) / cfg.ell);
        samples.push(AprioriSample { big_r, lhs, rhs, ratio: lhs / rhs });
    }
    let max_ratio = samples.iter().map(|s| s.ratio).fold(0.0, f64::max);
    let growth_exponent = if samples.iter().all(|s| s.ratio > 0.0) {
        let xs: Vec<f64> = samples.iter().map(|s| -s.big_r.ln()).collect();
        let ys: Vec<f64> = samples.iter().map(|s| s.ratio.ln()).collect();
        ls_slope(&xs, &ys)
    } else {
        0.0
    };
    let (contraction, extrapolated_limit) = increment_contraction(&samples);
    let bounded = growth_exponent <= cfg.growth_tol || contraction <= cfg.contraction_max;
    let pass = samples.iter().all(|s| s.ratio.is_finite() && s.ratio >= 0.0) && bounded;
    Ok(AprioriReport { samples, growth_exponent, contraction, extrapolated_limit, max_ratio, pass })
}

/// Contraction of the last three increments of the ratio sequence and the resulting limit.
fn increment_contraction(samples: &[AprioriSample]) -> (f64, f64) {
    let d: Vec<f64> = samples.windows(2).map(|w| w[1].ratio - w[0].ratio).collect();
    let last = samples.last().map_or(0.0, |s| s.ratio);
    let tail = &d[d.len().saturating_sub(4)..];
    if tail.iter().all(|&x| x == 0.0) {
        return (0.0, last);
    }
    if tail.len() < 2 || tail.contains(&0.0) {
        return (f64::INFINITY, f64::INFINITY);
    }
    let rho = (tail.windows(2).map(|w| (w[1] / w[0]).abs().ln()).sum::<f64>() / (tail.len() - 1) as f64).exp();
    let limit = if rho < 1.0 { last + tail[tail.len() - 1] * rho / (1.0 - rho) } else { f64::INFINITY };
    (rho, limit)
}

/// Inner boundary data for the comparison family.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum BoundaryData {
    /// The fundamental profile.
    Fundamental,
    /// The explicit power solution.
    Strong,
    /// `(1-t) Phi + t * strong_multiplier * S` for `t = j/(count-1)`.
    Anchors { count: usize },
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DichotomyConfig {
    /// Coefficient of the reaction term.
    pub c: f64,
    pub strong_multiplier: f64,
    pub window: (f64, f64),
    /// Relative slope tolerance of the classification.
    pub slope_tol: f64,
    pub family: FamilyConfig,
}

impl Default for DichotomyConfig {
    fn default() -> Self {
        Self {
            c: 1e-2,
            strong_multiplier: 10.0,
            window: (2e-2, 2e-1),
            slope_tol: 0.05,
            family: FamilyConfig::default(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DichotomyDatum {
    pub label: String,
    pub fit: AsymptoticFit,
    pub direction: Monotonicity,
    /// Every node of the fit window agrees between the last two iterates.
    pub converged_in_window: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DichotomyReport {
    pub theta: f64,
    pub fundamental_exponent: f64,
    pub strong_exponent: f64,
    pub data: Vec<DichotomyDatum>,
    /// Labels of data whose fit is neither fundamental nor strong.
    pub offending: Vec<String>,
    pub pass: bool,
}

/// Solves the comparison family for each datum and classifies the limit's decay.
pub fn dichotomy_pipeline(
    params: &ProblemParams,
    data: BoundaryData,
    cfg: &DichotomyConfig,
) -> Result<DichotomyReport> {
    let class = classify_profile(params)?;
    if class.kind != ProfileKind::Dichotomy {
        return Err(Error::Precondition(format!("profile classification is {:?}", class.kind)));
    }
    let theta = derive_exponents(params).theta_plus;
    let eq = RadialEquation::new(params, theta, cfg.c, params.q())?;
    let (lambda, s) = eq
        .power_solution()
        .ok_or_else(|| Error::Precondition("no explicit power solution for these exponents".into()))?;
    let strong = move |r: f64| lambda * r.powf(-s);
    let fundamental = move |r: f64| eq.fundamental(r);
    let data: Vec<(String, f64, f64)> = match data {
        BoundaryData::Fundamental => vec![("fundamental".into(), 0.0, 0.0)],
        BoundaryData::Strong => vec![("strong".into(), 1.0, 1.0)],
        BoundaryData::Anchors { count } => {
            if count < 2 {
                return Err(Error::Precondition("need at least two anchors".into()));
            }
            (0..count)
                .map(|j| {
                    let t = j as f64 / (count - 1) as f64;
                    (format!("anchor {j} (t = {t:.4})"), t, t * cfg.strong_multiplier)
                })
                .collect()
        }
    };
    let reference = FitReference::for_equation(&eq, cfg.slope_tol);
    let mut out = Vec::with_capacity(data.len());
    let mut offending = Vec::new();
    for (label, t, weight) in data {
        let g = move |r: f64| (1.0 - t) * fundamental(r) + weight * strong(r);
        let lim = monotone_limit(&eq, g, g(1.0), &cfg.family)?;
        let fit = fit_asymptotic_slope(&lim.solution.grid, cfg.window, &reference)?;
        let (lo, hi) = cfg.window;
        let converged_in_window = lim
            .solution
            .grid
            .radii()
            .iter()
            .zip(&lim.converged)
            .filter(|(&r, _)| r >= lo * (1.0 - 1e-12) && r <= hi * (1.0 + 1e-12))
            .all(|(_, &c)| c);
        if !matches!(fit.classification, FitClass::Fundamental | FitClass::Strong) {
            offending.push(label.clone());
        }
        out.push(DichotomyDatum { label, fit, direction: lim.direction, converged_in_window });
    }
    Ok(DichotomyReport {
        theta,
        fundamental_exponent: eq.fundamental_exponent(),
        strong_exponent: eq.strong_exponent(),
        pass: offending.is_empty(),
        data: out,
        offending,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum CheckStatus {
    Pass,
    Fail,
    Skipped,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CheckResult {
    pub name: String,
    pub status: CheckStatus,
    pub measured: BTreeMap<String, Value>,
    pub tolerances: BTreeMap<String, f64>,
    pub provenance: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reason: Option<String>,
    /// Set when the check failed because a numerical method missed its tolerance.
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub numerical_failure: bool,
}

impl CheckResult {
    fn new(name: &str, provenance: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            status: CheckStatus::Skipped,
            measured: BTreeMap::new(),
            tolerances: BTreeMap::new(),
            provenance: provenance.into(),
            reason: None,
            numerical_failure: false,
        }
    }

    fn measure(mut self, key: &str, v: impl Serialize) -> Self {
        self.measured.insert(key.into(), serde_json::to_value(v).unwrap_or(Value::Null));
        self
    }

    fn tolerance(mut self, key: &str, v: f64) -> Self {
        self.tolerances.insert(key.into(), v);
        self
    }

    fn verdict(mut self, pass: bool) -> Self {
        self.status = if pass { CheckStatus::Pass } else { CheckStatus::Fail };
        self
    }

    fn skipped(mut self, reason: impl Into<String>) -> Self {
        self.status = CheckStatus::Skipped;
        self.reason = Some(reason.into());
        self
    }

    /// Unmet preconditions skip the check; every other error fails it.
    fn failed(mut self, err: &Error) -> Self {
        self.status = match err {
            Error::Precondition(_) => CheckStatus::Skipped,
            _ => CheckStatus::Fail,
        };
        self.reason = Some(err.to_string());
        self.numerical_failure = err.is_numerical();
        self
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VerificationReport {
    pub schema: u32,
    pub params: RawParams,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub preset: Option<String>,
    pub config: VerifyConfig,
    pub checks: Vec<CheckResult>,
}

impl VerificationReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.status != CheckStatus::Fail)
    }

    /// True when some check failed because a numerical method missed its tolerance.
    pub fn numerical_failure(&self) -> bool {
        self.checks.iter().any(|c| c.status == CheckStatus::Fail && c.numerical_failure)
    }

    pub fn check(&self, name: &str) -> Option<&CheckResult> {
        self.checks.iter().find(|c| c.name == name)
    }

    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string_pretty(self).map_err(|e| Error::Parse(e.to_string()))
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let report: Self = serde_json::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
        if report.schema != SCHEMA_VERSION {
            return Err(Error::Parse(format!("unsupported schema {}, expected {SCHEMA_VERSION}", report.schema)));
        }
        Ok(report)
    }

    pub fn text_summary(&self) -> String {
        let p = &self.params;
        let mut out =
            format!("verification of N={} m={} p={} q={} alpha={} beta={}", p.n, p.m, p.p, p.q, p.alpha, p.beta);
        if let Some(name) = &self.preset {
            let _ = write!(out, " (preset {name})");
        }
        out.push('\n');
        for c in &self.checks {
            let status = match c.status {
                CheckStatus::Pass => "PASS",
                CheckStatus::Fail => "FAIL",
                CheckStatus::Skipped => "SKIPPED",
            };
            let _ = write!(out, "  {status:<7} {}", c.name);
            let numbers: Vec<String> = c
                .measured
                .iter()
                .filter(|(_, v)| v.is_number() || v.is_string() || v.is_boolean())
                .map(|(k, v)| format!("{k}={v}"))
                .collect();
            if !numbers.is_empty() {
                let _ = write!(out, ": {}", numbers.join(", "));
            }
            if let Some(r) = &c.reason {
                let _ = write!(out, " [{r}]");
            }
            out.push('\n');
        }
        let _ = writeln!(out, "overall: {}", if self.passed() { "PASS" } else { "FAIL" });
        out
    }
}

/// Named parameter sets used throughout the documentation and tests.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Preset {
    Thm1Subcritical,
    Thm2Case1,
    Thm2Critical,
    Thm2Case2,
}

impl Preset {
    pub const ALL: [Preset; 4] = [Preset::Thm1Subcritical, Preset::Thm2Case1, Preset::Thm2Critical, Preset::Thm2Case2];

    pub fn name(self) -> &'static str {
        match self {
            Preset::Thm1Subcritical => "thm1-subcritical",
            Preset::Thm2Case1 => "thm2-case1",
            Preset::Thm2Critical => "thm2-critical",
            Preset::Thm2Case2 => "thm2-case2",
        }
    }

    pub fn tuple(self) -> &'static str {
        match self {
            Preset::Thm1Subcritical => "3,2,2,2,1.5,1",
            Preset::Thm2Case1 => "5,2,1.4,1.4,1,1",
            Preset::Thm2Critical => "5,2,1,2,1,3",
            Preset::Thm2Case2 => "5,2,1.01,2.3,1,2.5",
        }
    }

    pub fn params(self) -> ProblemParams {
        self.tuple().parse().expect("preset tuples are valid")
    }

    /// Decay exponent used by the pointwise check, when the preset fixes one.
    pub fn gamma(self) -> Option<f64> {
        match self {
            Preset::Thm1Subcritical => Some(0.4),
            Preset::Thm2Case1 => Some(2.1),
            _ => None,
        }
    }
}

/// Profile for the pointwise check: `kappa |x|^{-gamma}` with `gamma` given or the midpoint of the admissible range.
pub fn pointwise_profile(params: &ProblemParams, gamma: Option<f64>) -> Result<PowerLogProfile> {
    let gamma = match gamma {
        Some(g) => g,
        None => candidate_gamma_range(params)?.midpoint(),
    };
    PowerLogProfile::power(gamma)
}

fn run_pointwise(params: &ProblemParams, gamma: Option<f64>, cfg: &VerifyConfig) -> CheckResult {
    let c =
        CheckResult::new("pointwise_inequality", "closed-form operator against Riesz quadrature on the candidate grid")
            .tolerance("kappa_safety", cfg.kappa_safety)
            .tolerance("kappa_refinement_tol", cfg.kappa_refinement_tol);
    let u = match pointwise_profile(params, gamma) {
        Ok(u) => u,
        Err(e) => return c.skipped(e.to_string()),
    };
    let c = c.measure("gamma", u.gamma);
    match verify_pointwise_inequality(&u, params, cfg) {
        Ok(m) => c
            .measure("kappa_star", m.kappa_star)
            .measure("kappa_star_base", m.kappa_star_base)
            .measure("kappa_star_refined", m.kappa_star_refined)
            .measure("degenerate", m.degenerate)
            .measure("amplitude", m.amplitude)
            .measure("argmin_r", m.argmin_r)
            .measure("min_margin", m.grid.values().iter().cloned().fold(f64::INFINITY, f64::min))
            .measure("max_relative_quadrature_error", m.max_relative_quadrature_error)
            .verdict(m.pass),
        Err(e) => c.failed(&e),
    }
}

fn run_double(params: &ProblemParams, cfg: &VerifyConfig) -> CheckResult {
    let c = CheckResult::new("double_inequality", "explicit candidate of the construction branch")
        .tolerance("spread_refinement_tol", cfg.spread_refinement_tol)
        .tolerance("drift_bound", cfg.drift_bound);
    match verify_double_inequality(params, cfg) {
        Ok(d) => c
            .measure("gamma", d.candidate.gamma)
            .measure("tau", d.candidate.tau)
            .measure("a_hat", d.a_hat)
            .measure("b_hat", d.b_hat)
            .measure("a_hat_refined", d.a_hat_refined)
            .measure("b_hat_refined", d.b_hat_refined)
            .measure("spread_change", d.spread_change)
            .measure("drift", d.drift)
            .verdict(d.pass),
        Err(e) => c.failed(&e),
    }
}

/// Profile fed to the bound checks: the explicit candidate, or the pointwise profile when `N < m + alpha`.
pub fn certified_profile(params: &ProblemParams, gamma: Option<f64>) -> Result<PowerLogProfile> {
    if params.geometry() == Geometry::SubcriticalDim {
        pointwise_profile(params, gamma)
    } else {
        construct_candidate(params)
    }
}

fn run_keller_osserman(params: &ProblemParams, gamma: Option<f64>, cfg: &VerifyConfig) -> [CheckResult; 2] {
    let c = CheckResult::new("keller_osserman", "explicit candidate sampled on the check grid")
        .tolerance("ko_stabilization_tol", cfg.ko_stabilization_tol);
    let ctl = CheckResult::new("keller_osserman_negative_control", "synthetic r^(-sigma-0.1); passes when flagged")
        .tolerance("ko_stabilization_tol", cfg.ko_stabilization_tol);
    if params.p() + params.q() <= 2.0 * (params.m() - 1.0) {
        let why = "requires p+q > 2(m-1)";
        return [c.skipped(why), ctl.skipped(why)];
    }
    let sampled = certified_profile(params, gamma).and_then(|u| {
        let radii = cfg.grid.radii()?;
        RadialGrid::sample_on(radii, |r| u.value_unchecked(r))
    });
    let c = match sampled.and_then(|g| keller_osserman_check(&g, params, cfg)) {
        Ok(r) => c.measure("sup", r.sup).measure("last_growth", r.last_growth).verdict(r.pass),
        Err(e) => c.failed(&e),
    };
    let sigma = derive_exponents(params).sigma;
    let control = cfg
        .grid
        .radii()
        .and_then(|radii| RadialGrid::sample_on(radii, |r| r.powf(-sigma - 0.1)))
        .and_then(|g| keller_osserman_check(&g, params, cfg));
    let ctl = match control {
        Ok(r) => ctl.measure("sup", r.sup).measure("last_growth", r.last_growth).verdict(!r.pass),
        Err(e) => ctl.failed(&e),
    };
    [c, ctl]
}

fn run_apriori(params: &ProblemParams, gamma: Option<f64>, cfg: &VerifyConfig) -> [CheckResult; 2] {
    let c = CheckResult::new("apriori_ratio", "explicit candidate with the smoothstep cutoff")
        .tolerance("growth_tol", cfg.apriori.growth_tol)
        .tolerance("contraction_max", cfg.apriori.contraction_max);
    let h = CheckResult::new("apriori_homogeneity", "candidate against twice the candidate")
        .tolerance("relative", APRIORI_HOMOGENEITY_TOL);
    let setup = AprioriCheckConfig::for_params(params, &cfg.apriori, cfg.quadrature)
        .and_then(|a| certified_profile(params, gamma).map(|u| (a, u)));
    let (acfg, u) = match setup {
        Ok(x) => x,
        Err(e) => return [c.skipped(e.to_string()), h.skipped(e.to_string())],
    };
    let base = apriori_ratio_check(&u, params, &acfg);
    let c = match &base {
        Ok(r) => c
            .measure("lambda", acfg.lambda)
            .measure("ell", acfg.ell)
            .measure("growth_exponent", r.growth_exponent)
            .measure("contraction", r.contraction)
            .measure("extrapolated_limit", r.extrapolated_limit)
            .measure("max_ratio", r.max_ratio)
            .measure("samples", &r.samples)
            .verdict(r.pass),
        Err(e) => c.failed(e),
    };
    let scaled = u.with_kappa(2.0 * u.kappa).and_then(|u2| apriori_ratio_check(&u2, params, &acfg));
    let h = match (&base, scaled) {
        (Ok(a), Ok(b)) => {
            let want = 2f64.powf(homogeneity_gap(params));
            let dev = a
                .samples
                .iter()
                .zip(&b.samples)
                .map(|(x, y)| (y.ratio / (want * x.ratio) - 1.0).abs())
                .fold(0.0, f64::max);
            h.measure("expected_factor", want)
                .measure("max_relative_deviation", dev)
                .verdict(dev <= APRIORI_HOMOGENEITY_TOL)
        }
        (Err(e), _) => h.failed(e),
        (_, Err(e)) => h.failed(&e),
    };
    [c, h]
}

/// Relative round-off allowance of the exact amplitude scaling of the a-priori ratio.
pub const APRIORI_HOMOGENEITY_TOL: f64 = 1e-9;

fn run_dichotomy(params: &ProblemParams, cfg: &VerifyConfig) -> CheckResult {
    let d = &cfg.dichotomy;
    let c = CheckResult::new("dichotomy", format!("comparison family with C = {}, {} anchors", d.c, DICHOTOMY_ANCHORS))
        .tolerance("slope_tol", d.slope_tol);
    match classify_profile(params) {
        Ok(p) if p.kind == ProfileKind::Dichotomy => {}
        Ok(p) => return c.skipped(format!("profile classification is {:?}", p.kind)),
        Err(e) => return c.skipped(e.to_string()),
    }
    match dichotomy_pipeline(params, BoundaryData::Anchors { count: DICHOTOMY_ANCHORS }, d) {
        Ok(r) => {
            let slopes: Vec<f64> = r.data.iter().map(|x| x.fit.slope).collect();
            let classes: Vec<FitClass> = r.data.iter().map(|x| x.fit.classification).collect();
            c.measure("theta", r.theta)
                .measure("fundamental_exponent", r.fundamental_exponent)
                .measure("strong_exponent", r.strong_exponent)
                .measure("slopes", slopes)
                .measure("classes", classes)
                .measure("offending", &r.offending)
                .verdict(r.pass)
        }
        Err(e) => c.failed(&e),
    }
}

/// Number of boundary-data anchors in the report pipeline.
pub const DICHOTOMY_ANCHORS: usize = 8;

/// Runs every applicable check for `params`.
pub fn run_verification(
    params: &ProblemParams,
    gamma: Option<f64>,
    preset: Option<Preset>,
    cfg: &VerifyConfig,
) -> Result<VerificationReport> {
    cfg.validate()?;
    let verdict = classify_existence(params);
    let existence = CheckResult::new("existence", "exact rational classification")
        .measure("verdict", verdict.exists)
        .measure("margins", &verdict.margins)
        .verdict(verdict.admits_construction());
    let mut checks = vec![existence];
    if verdict.admits_construction() {
        checks.push(run_pointwise(params, gamma, cfg));
        checks.push(run_double(params, cfg));
        checks.extend(run_keller_osserman(params, gamma, cfg));
        checks.extend(run_apriori(params, gamma, cfg));
        checks.push(run_dichotomy(params, cfg));
    } else {
        let why = format!("existence verdict is {:?}", verdict.exists);
        for name in [
            "pointwise_inequality",
            "double_inequality",
            "keller_osserman",
            "keller_osserman_negative_control",
            "apriori_ratio",
            "apriori_homogeneity",
            "dichotomy",
        ] {
            checks.push(CheckResult::new(name, "not run").skipped(why.clone()));
        }
    }
    Ok(VerificationReport {
        schema: SCHEMA_VERSION,
        params: params.to_raw(),
        preset: preset.map(|p| p.name().to_string()),
        config: cfg.clone(),
        checks,
    })
}
