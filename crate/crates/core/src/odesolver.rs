//! Radial comparison problems `(r^{N-1-alpha} |w'|^{m-2} w')' = C r^{N-1-theta} w^q`.
//!
//! The state is `(w, v)` with the flux `v = r^{N-1-alpha} |w'|^{m-2} w'`,
//! integrated in `t = log r` by an embedded Dormand-Prince 5(4) pair.

use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::ansatz::log_factor;
use crate::error::{Error, Result};
use crate::exponents::ProblemParams;
use crate::grid::{log_spaced, RadialGrid};

/// Overflow guard on `w`.
pub const BLOWUP_GUARD: f64 = 1e200;
/// Growth rate `|d log w / d log r|` above which collapsing steps count as blowup.
pub const BLOWUP_LOG_RATE: f64 = 1e6;
/// Floor on `|v|` used to invert the flux when `m > 2`.
pub const FLUX_FLOOR: f64 = 1e-30;

/// Coefficients of the radial equation.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RadialEquation {
    pub n: f64,
    pub m: f64,
    pub alpha: f64,
    pub theta: f64,
    pub c: f64,
    pub q: f64,
}

impl RadialEquation {
    pub fn new(params: &ProblemParams, theta: f64, c: f64, q: f64) -> Result<Self> {
        let eq = Self { n: params.dim() as f64, m: params.m(), alpha: params.alpha(), theta, c, q };
        let mut bad = Vec::new();
        if !(theta >= 0.0 && theta < eq.m + eq.alpha) {
            bad.push(format!("theta = {theta} outside [0, m+alpha)"));
        }
        if !(q > eq.m - 1.0) {
            bad.push(format!("q = {q} must exceed m-1"));
        }
        if !(c >= 0.0 && c.is_finite()) {
            bad.push(format!("C = {c} must be >= 0"));
        }
        if bad.is_empty() {
            Ok(eq)
        } else {
            Err(Error::Violation(bad))
        }
    }

    /// `(m + alpha - theta) / (q - m + 1)`.
    pub fn strong_exponent(&self) -> f64 {
        (self.m + self.alpha - self.theta) / (self.q - self.m + 1.0)
    }

    /// `(N - m - alpha) / (m - 1)`; zero means the logarithmic profile.
    pub fn fundamental_exponent(&self) -> f64 {
        ((self.n - self.m - self.alpha) / (self.m - 1.0)).max(0.0)
    }

    /// Fundamental profile: `r^{-phi}`, or `log(5/r)` when `N <= m + alpha`.
    pub fn fundamental(&self, r: f64) -> f64 {
        let phi = self.fundamental_exponent();
        if phi > 0.0 {
            r.powf(-phi)
        } else {
            log_factor(r)
        }
    }

    /// `r^{N-1-alpha} |w'|^{m-2} w'`.
    pub fn flux_of_slope(&self, r: f64, dw: f64) -> f64 {
        r.powf(self.n - 1.0 - self.alpha) * dw.abs().powf(self.m - 2.0) * dw
    }

    /// Inverse of [`RadialEquation::flux_of_slope`]; the flag reports a binding floor.
    pub fn slope_of_flux(&self, r: f64, v: f64) -> (f64, bool) {
        if v == 0.0 {
            return (0.0, self.m > 2.0);
        }
        let mut mag = v.abs();
        let mut floored = false;
        if self.m > 2.0 && mag < FLUX_FLOOR {
            mag = FLUX_FLOOR;
            floored = true;
        }
        let dw = (mag * r.powf(-(self.n - 1.0 - self.alpha))).powf(1.0 / (self.m - 1.0));
        (dw.copysign(v), floored)
    }

    /// Explicit singular solution `lambda r^{-s}` with `s` the strong exponent, if `C > 0`.
    pub fn power_solution(&self) -> Option<(f64, f64)> {
        let s = self.strong_exponent();
        let k = s.powf(self.m - 1.0) * (s * (self.m - 1.0) - (self.n - self.m - self.alpha));
        (self.c > 0.0 && k > 0.0).then(|| ((k / self.c).powf(1.0 / (self.q - self.m + 1.0)), s))
    }

    /// Right-hand side in `t = log r`.
    fn rhs(&self, t: f64, y: [f64; 2], floored: &mut bool) -> [f64; 2] {
        let r = t.exp();
        let (dw, f) = self.slope_of_flux(r, y[1]);
        *floored |= f;
        let dv = if self.c == 0.0 { 0.0 } else { self.c * r.powf(self.n - self.theta) * y[0].max(0.0).powf(self.q) };
        [r * dw, dv]
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct IntegratorConfig {
    pub rtol: f64,
    /// Absolute tolerance as a fraction of the initial state magnitude.
    pub atol_scale: f64,
    pub max_steps: usize,
    /// Fixed step in `log r`; adaptive stepping when `None`.
    pub fixed_step: Option<f64>,
}

impl Default for IntegratorConfig {
    fn default() -> Self {
        Self { rtol: 1e-11, atol_scale: 1e-14, max_steps: 1_000_000, fixed_step: None }
    }
}

/// Sampled solution of the radial equation.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ODESolution {
    pub grid: RadialGrid,
    pub flux: RadialGrid,
    /// Relative mismatch of the inner boundary value; zero for initial value problems.
    pub residual: f64,
    /// Set when the flux floor was used for the inversion.
    pub floor_bound: bool,
}

impl ODESolution {
    /// `r,w,v` rows with a header line.
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "r,w,v")?;
        for ((r, w), v) in self.grid.iter().zip(self.flux.values()) {
            writeln!(out, "{r:.17e},{w:.17e},{v:.17e}")?;
        }
        Ok(())
    }

    pub fn to_csv_string(&self) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf).expect("writing to a Vec cannot fail");
        String::from_utf8(buf).expect("csv output is ascii")
    }
}

const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const B1: f64 = 35.0 / 384.0;
const B3: f64 = 500.0 / 1113.0;
const B4: f64 = 125.0 / 192.0;
const B5: f64 = -2187.0 / 6784.0;
const B6: f64 = 11.0 / 84.0;
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

fn axpy(y: [f64; 2], terms: &[(f64, [f64; 2])], h: f64) -> [f64; 2] {
    let mut out = y;
    for &(c, k) in terms {
        out[0] += h * c * k[0];
        out[1] += h * c * k[1];
    }
    out
}

/// One Dormand-Prince step; returns the fifth-order state, its derivative and the error vector.
fn dp_step(
    eq: &RadialEquation,
    t: f64,
    y: [f64; 2],
    k1: [f64; 2],
    h: f64,
    fl: &mut bool,
) -> ([f64; 2], [f64; 2], [f64; 2]) {
    let k2 = eq.rhs(t + h / 5.0, axpy(y, &[(A21, k1)], h), fl);
    let k3 = eq.rhs(t + 3.0 * h / 10.0, axpy(y, &[(A31, k1), (A32, k2)], h), fl);
    let k4 = eq.rhs(t + 4.0 * h / 5.0, axpy(y, &[(A41, k1), (A42, k2), (A43, k3)], h), fl);
    let k5 = eq.rhs(t + 8.0 * h / 9.0, axpy(y, &[(A51, k1), (A52, k2), (A53, k3), (A54, k4)], h), fl);
    let k6 = eq.rhs(t + h, axpy(y, &[(A61, k1), (A62, k2), (A63, k3), (A64, k4), (A65, k5)], h), fl);
    let y5 = axpy(y, &[(B1, k1), (B3, k3), (B4, k4), (B5, k5), (B6, k6)], h);
    let k7 = eq.rhs(t + h, y5, fl);
    let mut err = [0.0; 2];
    for i in 0..2 {
        err[i] = h * (E1 * k1[i] + E3 * k3[i] + E4 * k4[i] + E5 * k5[i] + E6 * k6[i] + E7 * k7[i]);
    }
    (y5, k7, err)
}

/// Steps collapse either at a genuine singularity of `w` or for numerical reasons.
fn collapse(t: f64, y: [f64; 2], k: [f64; 2], dir: f64, finite: bool) -> Error {
    if !finite || k[0] * dir / y[0] > BLOWUP_LOG_RATE {
        Error::Blowup(t.exp())
    } else {
        Error::StepUnderflow(t.exp())
    }
}

/// Integrates from `start` to `stop` (either direction) and samples at `outputs`,
/// which must be ordered in the direction of integration.
pub fn integrate_to(
    eq: &RadialEquation,
    start: f64,
    w0: f64,
    v0: f64,
    outputs: &[f64],
    cfg: &IntegratorConfig,
) -> Result<(Vec<[f64; 2]>, bool)> {
    if !(w0 > 0.0) {
        return Err(Error::Precondition(format!("initial value must be positive, got {w0}")));
    }
    if !(start > 0.0) {
        return Err(Error::Domain(start));
    }
    let mut floored = false;
    let mut t = start.ln();
    let mut y = [w0, v0];
    let mut k = eq.rhs(t, y, &mut floored);
    let atol = [cfg.atol_scale * w0.abs(), cfg.atol_scale * v0.abs().max(k[1].abs()).max(f64::MIN_POSITIVE)];
    let mut h = cfg.fixed_step.unwrap_or(1e-3);
    let mut steps = 0usize;
    let mut out = Vec::with_capacity(outputs.len());
    for &target in outputs {
        let t_end = target.ln();
        let dir = if t_end >= t { 1.0 } else { -1.0 };
        h = h.abs() * dir;
        while (t_end - t) * dir > 0.0 {
            steps += 1;
            if steps > cfg.max_steps {
                return Err(Error::MaxIter(cfg.max_steps));
            }
            let remaining = t_end - t;
            let last = h.abs() >= remaining.abs();
            let step = if last { remaining } else { h };
            if step.abs() <= 1e-14 * t.abs().max(1.0) && !last {
                return Err(collapse(t, y, k, dir, true));
            }
            let (y_new, k_new, err) = dp_step(eq, t, y, k, step, &mut floored);
            let norm = if cfg.fixed_step.is_some() {
                0.0
            } else {
                (0..2).map(|i| err[i].abs() / (atol[i] + cfg.rtol * y[i].abs().max(y_new[i].abs()))).fold(0.0, f64::max)
            };
            let finite = y_new.iter().chain(k_new.iter()).all(|x| x.is_finite());
            if finite && norm <= 1.0 {
                t = if last { t_end } else { t + step };
                y = y_new;
                k = k_new;
                if y[0] > BLOWUP_GUARD {
                    return Err(Error::Blowup(t.exp()));
                }
                if y[0] <= 0.0 {
                    return Err(Error::HitZero(t.exp()));
                }
                if cfg.fixed_step.is_none() && !last {
                    let grow = if norm == 0.0 { 5.0 } else { (0.9 * norm.powf(-0.2)).clamp(0.2, 5.0) };
                    h = step * grow;
                }
            } else {
                if cfg.fixed_step.is_some() {
                    return Err(Error::Blowup(t.exp()));
                }
                let shrink = if finite { (0.9 * norm.powf(-0.2)).clamp(0.1, 0.5) } else { 0.25 };
                h = step * shrink;
                if h.abs() <= 1e-14 * t.abs().max(1.0) {
                    return Err(collapse(t, y, k, dir, finite));
                }
            }
        }
        out.push(y);
    }
    Ok((out, floored))
}

/// Initial value problem from `start` to `stop`, sampled at `count` log-spaced radii.
pub fn integrate_radial(
    eq: &RadialEquation,
    start: f64,
    w0: f64,
    v0: f64,
    stop: f64,
    count: usize,
    cfg: &IntegratorConfig,
) -> Result<ODESolution> {
    for r in [start, stop] {
        if !(r > 0.0 && r <= 1.0) {
            return Err(Error::Domain(r));
        }
    }
    let mut radii = log_spaced(start.min(stop), start.max(stop), count)?;
    let inward = stop < start;
    if inward {
        radii.reverse();
    }
    let (states, floored) = integrate_to(eq, start, w0, v0, &radii, cfg)?;
    assemble(radii, states, inward, 0.0, floored)
}

fn assemble(
    mut radii: Vec<f64>,
    mut states: Vec<[f64; 2]>,
    reversed: bool,
    residual: f64,
    floor_bound: bool,
) -> Result<ODESolution> {
    if reversed {
        radii.reverse();
        states.reverse();
    }
    let grid = RadialGrid::new(radii.clone(), states.iter().map(|s| s[0]).collect())?;
    let flux = RadialGrid::new(radii, states.iter().map(|s| s[1]).collect())?;
    Ok(ODESolution { grid, flux, residual, floor_bound })
}

/// Dirichlet problem on the annulus `[r_in, 1]`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RadialBVP {
    pub equation: RadialEquation,
    pub r_in: f64,
    pub w_in: f64,
    pub w_out: f64,
}

impl RadialBVP {
    pub fn new(equation: RadialEquation, r_in: f64, w_in: f64, w_out: f64) -> Result<Self> {
        if !(r_in > 0.0 && r_in < 1.0) {
            return Err(Error::Domain(r_in));
        }
        if !(w_in > 0.0 && w_out > 0.0 && w_in.is_finite() && w_out.is_finite()) {
            return Err(Error::Precondition(format!("boundary values must be positive, got ({w_in}, {w_out})")));
        }
        Ok(Self { equation, r_in, w_in, w_out })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ShootingConfig {
    /// Relative tolerance on the inner boundary value.
    pub tol: f64,
    pub max_iter: usize,
    pub max_expansions: usize,
    pub integrator: IntegratorConfig,
}

impl Default for ShootingConfig {
    fn default() -> Self {
        Self { tol: 1e-9, max_iter: 400, max_expansions: 200, integrator: IntegratorConfig::default() }
    }
}

/// Signed mismatch `log w(r_in) - log target`, with blowup and collapse mapped to infinities.
fn shoot(bvp: &RadialBVP, v1: f64, cfg: &IntegratorConfig) -> Result<f64> {
    match integrate_to(&bvp.equation, 1.0, bvp.w_out, v1, &[bvp.r_in], cfg) {
        Ok((s, _)) => Ok(s[0][0].ln() - bvp.w_in.ln()),
        Err(Error::Blowup(_)) => Ok(f64::INFINITY),
        Err(Error::HitZero(_)) => Ok(f64::NEG_INFINITY),
        Err(e) => Err(e),
    }
}

/// Flux at `r = 1` of the two closed-form extremes through the boundary data.
fn bracket_guesses(bvp: &RadialBVP) -> [f64; 2] {
    let eq = &bvp.equation;
    let phi = eq.fundamental_exponent();
    let (f_in, f_out) = (eq.fundamental(bvp.r_in), eq.fundamental(1.0));
    let b = (bvp.w_in - bvp.w_out) / (f_in - f_out);
    let dphi = if phi > 0.0 { -phi } else { -1.0 };
    let v_fund = eq.flux_of_slope(1.0, b * dphi);
    let s = eq.strong_exponent();
    let kappa = bvp.w_in * bvp.r_in.powf(s);
    let v_strong = eq.flux_of_slope(1.0, -s * kappa);
    [v_fund, v_strong]
}

/// Solves the Dirichlet problem by shooting on the flux at `r = 1`.
pub fn solve_bvp_shooting(bvp: &RadialBVP, nodes: &[f64], cfg: &ShootingConfig) -> Result<ODESolution> {
    let [g1, g2] = bracket_guesses(bvp);
    let (mut lo, mut hi) = (g1.min(g2), g1.max(g2));
    if lo == hi {
        let d = lo.abs().max(1e-12);
        lo -= d;
        hi += d;
    }
    let mut f_lo = shoot(bvp, lo, &cfg.integrator)?;
    let mut f_hi = shoot(bvp, hi, &cfg.integrator)?;
    // The mismatch decreases in the outer flux: too negative a flux blows up inward.
    let mut expansions = 0;
    let mut span = (hi - lo).max(1e-12 * (lo.abs() + hi.abs()));
    while !(f_lo >= 0.0 && f_hi <= 0.0) {
        expansions += 1;
        if expansions > cfg.max_expansions || f_lo.is_nan() || f_hi.is_nan() {
            return Err(Error::NoBracket(format!("flux interval [{lo:e}, {hi:e}] mismatches ({f_lo}, {f_hi})")));
        }
        span *= 2.0;
        if f_lo < 0.0 {
            hi = lo;
            f_hi = f_lo;
            lo -= span;
            f_lo = shoot(bvp, lo, &cfg.integrator)?;
        } else {
            lo = hi;
            f_lo = f_hi;
            hi += span;
            f_hi = shoot(bvp, hi, &cfg.integrator)?;
        }
    }
    let target = cfg.tol.ln_1p();
    let mut best = if f_lo.abs() <= f_hi.abs() { (lo, f_lo) } else { (hi, f_hi) };
    let mut iter = 0;
    let mut side = 0i8;
    while best.1.abs() > target {
        iter += 1;
        if iter > cfg.max_iter {
            return Err(Error::MaxIter(cfg.max_iter));
        }
        // Illinois regula falsi when both ends are finite, bisection otherwise.
        let mid = if f_lo.is_finite() && f_hi.is_finite() {
            let (wl, wh) = match side {
                1 => (0.5, 1.0),
                -1 => (1.0, 0.5),
                _ => (1.0, 1.0),
            };
            let (a, b) = (wl * f_lo, wh * f_hi);
            let x = (lo * b - hi * a) / (b - a);
            if x > lo && x < hi {
                x
            } else {
                0.5 * (lo + hi)
            }
        } else {
            0.5 * (lo + hi)
        };
        if !(mid > lo && mid < hi) {
            // The flux is resolved to the last bit; keep the best endpoint.
            break;
        }
        let f = shoot(bvp, mid, &cfg.integrator)?;
        if f.abs() < best.1.abs() {
            best = (mid, f);
        }
        if f >= 0.0 {
            lo = mid;
            f_lo = f;
            side = if side == -1 { 0 } else { 1 };
        } else {
            hi = mid;
            f_hi = f;
            side = if side == 1 { 0 } else { -1 };
        }
    }
    let mut radii: Vec<f64> = nodes.iter().copied().filter(|&r| r > bvp.r_in && r < 1.0).collect();
    radii.insert(0, bvp.r_in);
    radii.push(1.0);
    radii.dedup();
    radii.reverse();
    let (states, floored) = integrate_to(&bvp.equation, 1.0, bvp.w_out, best.0, &radii, &cfg.integrator)?;
    let residual = (states[states.len() - 1][0] / bvp.w_in - 1.0).abs();
    assemble(radii, states, true, residual, floored)
}

/// Log-spaced comparison nodes `10^{-j/per_decade}` down to `r_min`.
pub fn decade_nodes(r_min: f64, per_decade: usize) -> Vec<f64> {
    let mut nodes = Vec::new();
    let mut j = 0usize;
    loop {
        let r = 10f64.powf(-(j as f64) / per_decade as f64);
        if r < r_min * (1.0 - 1e-12) {
            break;
        }
        nodes.push(r);
        j += 1;
    }
    nodes.reverse();
    nodes
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Monotonicity {
    Increasing,
    Decreasing,
    Constant,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FamilyConfig {
    pub r_min: f64,
    pub nodes_per_decade: usize,
    /// Relative slack allowed against the detected monotone direction.
    pub monotonicity_tol: f64,
    /// Relative change between the last two iterates counted as converged.
    pub convergence_tol: f64,
    pub shooting: ShootingConfig,
}

impl Default for FamilyConfig {
    fn default() -> Self {
        Self {
            r_min: 1e-4,
            nodes_per_decade: 40,
            monotonicity_tol: 1e-6,
            convergence_tol: 1e-2,
            shooting: ShootingConfig::default(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MonotoneLimit {
    pub solution: ODESolution,
    /// Inner radii `2^{-k}` of the solved family.
    pub inner_radii: Vec<f64>,
    pub residuals: Vec<f64>,
    pub direction: Monotonicity,
    /// One flag per node of `solution`: the last two iterates agree there.
    pub converged: Vec<bool>,
}

/// Solves the family `w_k` on `[2^{-k}, 1]` with `w_k(2^{-k}) = inner(2^{-k})`, `w_k(1) = w_out`,
/// down to the first `k` with `2^{-k} <= r_min`, and checks that the family is monotone in `k`.
pub fn monotone_limit<F: Fn(f64) -> f64 + Sync>(
    eq: &RadialEquation,
    inner: F,
    w_out: f64,
    cfg: &FamilyConfig,
) -> Result<MonotoneLimit> {
    if !(cfg.r_min > 0.0 && cfg.r_min < 0.5) {
        return Err(Error::Domain(cfg.r_min));
    }
    let k_max = (1.0 / cfg.r_min).log2().ceil() as usize;
    let nodes = decade_nodes(2f64.powi(-(k_max as i32)), cfg.nodes_per_decade);
    let family: Vec<ODESolution> = (1..=k_max)
        .into_par_iter()
        .map(|k| {
            let r_k = 2f64.powi(-(k as i32));
            let bvp = RadialBVP::new(*eq, r_k, inner(r_k), w_out)?;
            solve_bvp_shooting(&bvp, &nodes, &cfg.shooting)
        })
        .collect::<Result<_>>()?;

    let diffs = |a: &ODESolution, b: &ODESolution| -> Vec<(f64, f64, f64)> {
        // Shared nodes strictly inside the smaller annulus, excluding the fixed outer value.
        a.grid
            .iter()
            .skip(1)
            .filter(|&(r, _)| r < 1.0)
            .filter_map(|(r, wa)| b.grid.node_index(r).map(|j| (r, wa, b.grid.values()[j])))
            .collect()
    };
    let mut direction = Monotonicity::Constant;
    for (i, pair) in family.windows(2).enumerate() {
        for (r, wa, wb) in diffs(&pair[0], &pair[1]) {
            let d = wb - wa;
            let slack = cfg.monotonicity_tol * wa.abs().max(wb.abs());
            if d.abs() <= slack {
                continue;
            }
            let this = if d > 0.0 { Monotonicity::Increasing } else { Monotonicity::Decreasing };
            match direction {
                Monotonicity::Constant => direction = this,
                dir if dir != this => {
                    return Err(Error::MonotonicityViolation { k: i + 1, next: i + 2, r, diff: d });
                }
                _ => {}
            }
        }
    }
    let last = family.last().expect("k_max >= 2").clone();
    let converged = match family.len() {
        1 => vec![false; last.grid.len()],
        n => {
            let prev = &family[n - 2];
            last.grid
                .iter()
                .map(|(r, w)| match prev.grid.node_index(r) {
                    Some(j) => (w - prev.grid.values()[j]).abs() <= cfg.convergence_tol * w.abs(),
                    None => false,
                })
                .collect()
        }
    };
    Ok(MonotoneLimit {
        inner_radii: family.iter().map(|s| s.grid.r_min()).collect(),
        residuals: family.iter().map(|s| s.residual).collect(),
        solution: last,
        direction,
        converged,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum FitClass {
    Fundamental,
    Strong,
    Bounded,
    Undetermined,
}

/// Admissible asymptotic behaviours of a radial solution.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FitReference {
    /// `(N-m-alpha)/(m-1)`; zero selects the logarithmic fundamental profile.
    pub fundamental_exponent: f64,
    pub strong_exponent: f64,
    /// Relative slope tolerance; absolute when the reference exponent is zero.
    pub tol: f64,
}

impl FitReference {
    pub fn for_equation(eq: &RadialEquation, tol: f64) -> Self {
        Self { fundamental_exponent: eq.fundamental_exponent(), strong_exponent: eq.strong_exponent(), tol }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AsymptoticFit {
    pub slope: f64,
    /// Slope of `log(w / log(5/r))`; used for the logarithmic fundamental profile.
    pub log_corrected_slope: f64,
    pub classification: FitClass,
    pub window: (f64, f64),
    pub nodes: usize,
    pub strong_exponent_ref: f64,
    pub fundamental_exponent_ref: f64,
}

fn ls_slope(xs: &[f64], ys: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    sxy / sxx
}

/// Least-squares slope of `log w` against `log r` over `window`, classified against `reference`.
pub fn fit_asymptotic_slope(w: &RadialGrid, window: (f64, f64), reference: &FitReference) -> Result<AsymptoticFit> {
    let (lo, hi) = window;
    if !(lo > 0.0 && hi / lo >= 10.0 * (1.0 - 1e-9)) {
        return Err(Error::WindowTooShort(format!("window [{lo}, {hi}] spans less than one decade")));
    }
    if lo < w.r_min() * (1.0 - 1e-9) || hi > w.r_max() * (1.0 + 1e-9) {
        return Err(Error::WindowTooShort(format!(
            "window [{lo}, {hi}] leaves the solved range [{}, {}]",
            w.r_min(),
            w.r_max()
        )));
    }
    let pts: Vec<(f64, f64)> = w.iter().filter(|&(r, _)| r >= lo * (1.0 - 1e-12) && r <= hi * (1.0 + 1e-12)).collect();
    if pts.len() < 3 || pts.iter().any(|&(_, v)| v <= 0.0) {
        return Err(Error::WindowTooShort(format!("{} positive nodes in [{lo}, {hi}]", pts.len())));
    }
    let xs: Vec<f64> = pts.iter().map(|p| p.0.ln()).collect();
    let ys: Vec<f64> = pts.iter().map(|p| p.1.ln()).collect();
    let yl: Vec<f64> = pts.iter().map(|p| (p.1 / log_factor(p.0)).ln()).collect();
    let slope = ls_slope(&xs, &ys);
    let log_corrected_slope = ls_slope(&xs, &yl);

    let tol = reference.tol;
    let phi = reference.fundamental_exponent;
    let s = reference.strong_exponent;
    let mut matches: Vec<(f64, FitClass)> = Vec::new();
    if phi > 0.0 {
        let d = (slope + phi).abs();
        if d < tol * phi {
            matches.push((d / phi, FitClass::Fundamental));
        }
    } else if log_corrected_slope.abs() < tol {
        matches.push((log_corrected_slope.abs(), FitClass::Fundamental));
    }
    let d = (slope + s).abs();
    if d < tol * s {
        matches.push((d / s, FitClass::Strong));
    }
    if slope.abs() < tol && !matches.iter().any(|m| m.1 == FitClass::Fundamental) {
        matches.push((slope.abs(), FitClass::Bounded));
    }
    let classification = match matches.as_slice() {
        [(_, c)] => *c,
        _ => FitClass::Undetermined,
    };
    Ok(AsymptoticFit {
        slope,
        log_corrected_slope,
        classification,
        window,
        nodes: pts.len(),
        strong_exponent_ref: s,
        fundamental_exponent_ref: phi,
    })
}
