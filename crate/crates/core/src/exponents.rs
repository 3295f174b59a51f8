//! Exponent algebra and regime classification.
//!
//! Every verdict here is decided in exact rational arithmetic so that parameter
//! sets sitting exactly on a boundary (for instance `p + q` equal to its upper
//! bound) are classified without floating-point ambiguity. Floating-point
//! values are derived only for downstream numerics.

use std::fmt;
use std::str::FromStr;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{Signed, ToPrimitive, Zero};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

/// Parses an exact rational from `"7/5"`, `"1.4"`, `"3"` or `"2.5e-1"`.
pub fn parse_rational(text: &str) -> Result<BigRational> {
    let s = text.trim();
    if s.is_empty() {
        return Err(Error::Parse("empty number".into()));
    }
    if let Some((num, den)) = s.split_once('/') {
        let num = parse_rational(num)?;
        let den = parse_rational(den)?;
        if den.is_zero() {
            return Err(Error::Parse(format!("zero denominator in '{s}'")));
        }
        return Ok(num / den);
    }
    let (mantissa, exponent) = match s.find(['e', 'E']) {
        Some(pos) => {
            let exp: i32 = s[pos + 1..].parse().map_err(|_| Error::Parse(format!("bad exponent in '{s}'")))?;
            (&s[..pos], exp)
        }
        None => (s, 0),
    };
    let (negative, digits) = match mantissa.strip_prefix('-') {
        Some(rest) => (true, rest),
        None => (false, mantissa.strip_prefix('+').unwrap_or(mantissa)),
    };
    let (int_part, frac_part) = digits.split_once('.').unwrap_or((digits, ""));
    if int_part.is_empty() && frac_part.is_empty() {
        return Err(Error::Parse(format!("no digits in '{s}'")));
    }
    if !int_part.chars().chain(frac_part.chars()).all(|c| c.is_ascii_digit()) {
        return Err(Error::Parse(format!("not a number: '{s}'")));
    }
    let all_digits = format!("{int_part}{frac_part}");
    let numer: BigInt = if all_digits.is_empty() {
        BigInt::zero()
    } else {
        all_digits.parse().map_err(|_| Error::Parse(format!("not a number: '{s}'")))?
    };
    let scale = exponent - frac_part.len() as i32;
    let ten = BigInt::from(10u32);
    let mut value = BigRational::from_integer(numer);
    if scale >= 0 {
        value *= BigRational::from_integer(num_traits::pow(ten, scale as usize));
    } else {
        value /= BigRational::from_integer(num_traits::pow(ten, (-scale) as usize));
    }
    Ok(if negative { -value } else { value })
}

fn rat(n: i64) -> BigRational {
    BigRational::from_integer(BigInt::from(n))
}

fn to_f64(x: &BigRational) -> f64 {
    x.to_f64().unwrap_or(f64::NAN)
}

fn fmt_rational(x: &BigRational) -> String {
    if x.is_integer() {
        x.numer().to_string()
    } else {
        format!("{}/{}", x.numer(), x.denom())
    }
}

/// Exact exponent tuple `(N, m, p, q, alpha, beta)` with the baseline bounds checked.
#[derive(Clone, Debug, PartialEq)]
pub struct ProblemParams {
    n: u32,
    m: BigRational,
    p: BigRational,
    q: BigRational,
    alpha: BigRational,
    beta: BigRational,
    float: [f64; 5],
    log_geometry: bool,
}

/// Raw, unvalidated parameter tuple. Strings accept any form [`parse_rational`] does.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct RawParams {
    #[serde(rename = "N")]
    pub n: String,
    pub m: String,
    pub p: String,
    pub q: String,
    pub alpha: String,
    pub beta: String,
}

impl ProblemParams {
    /// Validates exact inputs, reporting every violated baseline bound at once.
    pub fn new(
        n: &BigRational,
        m: BigRational,
        p: BigRational,
        q: BigRational,
        alpha: BigRational,
        beta: BigRational,
    ) -> Result<Self> {
        let mut violations = Vec::new();
        let n_int = if !n.is_integer() || *n < rat(1) {
            violations.push("N must be an integer >= 1".to_string());
            None
        } else {
            n.to_integer().to_u32()
        };
        if m <= rat(1) {
            violations.push("m <= 1 (m > 1 required)".to_string());
        }
        if p <= rat(0) {
            violations.push("p <= 0 (p > 0 required)".to_string());
        }
        if q <= &m - rat(1) {
            violations.push("q <= m-1 (q > m-1 required)".to_string());
        }
        if alpha <= rat(0) {
            violations.push("alpha <= 0 (alpha > 0 required)".to_string());
        }
        if beta <= rat(0) {
            violations.push("beta <= 0 (0 < beta < N required)".to_string());
        }
        if beta >= *n {
            violations.push("beta >= N (0 < beta < N required)".to_string());
        }
        match (violations.is_empty(), n_int) {
            (true, Some(n)) => {
                let float = [to_f64(&m), to_f64(&p), to_f64(&q), to_f64(&alpha), to_f64(&beta)];
                let log_geometry = rat(n as i64) == &m + &alpha;
                Ok(Self { n, m, p, q, alpha, beta, float, log_geometry })
            }
            (true, None) => Err(Error::Violation(vec!["N out of range".into()])),
            _ => Err(Error::Violation(violations)),
        }
    }

    /// Validates a tuple of reals. Each float is converted to the exact rational it encodes.
    pub fn from_f64(n: f64, m: f64, p: f64, q: f64, alpha: f64, beta: f64) -> Result<Self> {
        let conv = |name: &str, x: f64| {
            BigRational::from_float(x).ok_or_else(|| Error::Parse(format!("{name} is not finite")))
        };
        Self::new(
            &conv("N", n)?,
            conv("m", m)?,
            conv("p", p)?,
            conv("q", q)?,
            conv("alpha", alpha)?,
            conv("beta", beta)?,
        )
    }

    /// Validates decimal or fractional strings, e.g. `parse("5", "2", "7/5", "1.4", "1", "1")`.
    pub fn parse(n: &str, m: &str, p: &str, q: &str, alpha: &str, beta: &str) -> Result<Self> {
        Self::new(
            &parse_rational(n)?,
            parse_rational(m)?,
            parse_rational(p)?,
            parse_rational(q)?,
            parse_rational(alpha)?,
            parse_rational(beta)?,
        )
    }

    pub fn from_raw(raw: &RawParams) -> Result<Self> {
        Self::parse(&raw.n, &raw.m, &raw.p, &raw.q, &raw.alpha, &raw.beta)
    }

    pub fn to_raw(&self) -> RawParams {
        RawParams {
            n: self.n.to_string(),
            m: fmt_rational(&self.m),
            p: fmt_rational(&self.p),
            q: fmt_rational(&self.q),
            alpha: fmt_rational(&self.alpha),
            beta: fmt_rational(&self.beta),
        }
    }

    pub fn dim(&self) -> u32 {
        self.n
    }
    pub fn n(&self) -> f64 {
        self.n as f64
    }
    pub fn m(&self) -> f64 {
        self.float[0]
    }
    pub fn p(&self) -> f64 {
        self.float[1]
    }
    pub fn q(&self) -> f64 {
        self.float[2]
    }
    pub fn alpha(&self) -> f64 {
        self.float[3]
    }
    pub fn beta(&self) -> f64 {
        self.float[4]
    }

    /// True when `N = m + alpha` exactly (logarithmic fundamental solution).
    pub fn geometry_is_log(&self) -> bool {
        self.log_geometry
    }

    pub fn exact_m(&self) -> &BigRational {
        &self.m
    }
    pub fn exact_p(&self) -> &BigRational {
        &self.p
    }
    pub fn exact_q(&self) -> &BigRational {
        &self.q
    }
    pub fn exact_alpha(&self) -> &BigRational {
        &self.alpha
    }
    pub fn exact_beta(&self) -> &BigRational {
        &self.beta
    }

    fn exact_n(&self) -> BigRational {
        rat(self.n as i64)
    }

    /// `N - m - alpha`, whose sign fixes the dimensional geometry.
    fn excess(&self) -> BigRational {
        self.exact_n() - &self.m - &self.alpha
    }

    pub fn geometry(&self) -> Geometry {
        if self.excess() > rat(0) {
            Geometry::SupercriticalDim
        } else {
            Geometry::SubcriticalDim
        }
    }

    pub(crate) fn exact_sigma(&self) -> BigRational {
        (&self.m + &self.alpha + &self.beta) / (&self.p + &self.q - &self.m + rat(1))
    }

    /// Sign of `sigma * p - beta`.
    pub fn convolution_regime(&self) -> ConvolutionRegime {
        let d = self.exact_sigma() * &self.p - &self.beta;
        if d.is_positive() {
            ConvolutionRegime::Above
        } else if d.is_zero() {
            ConvolutionRegime::Balanced
        } else {
            ConvolutionRegime::Below
        }
    }
}

impl fmt::Display for ProblemParams {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "N={} m={} p={} q={} alpha={} beta={}",
            self.n,
            fmt_rational(&self.m),
            fmt_rational(&self.p),
            fmt_rational(&self.q),
            fmt_rational(&self.alpha),
            fmt_rational(&self.beta)
        )
    }
}

impl Serialize for ProblemParams {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        self.to_raw().serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for ProblemParams {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let raw = RawParams::deserialize(deserializer)?;
        ProblemParams::from_raw(&raw).map_err(serde::de::Error::custom)
    }
}

impl FromStr for ProblemParams {
    type Err = Error;

    /// Parses `"N,m,p,q,alpha,beta"`.
    fn from_str(s: &str) -> Result<Self> {
        let parts: Vec<&str> = s.split(',').collect();
        if parts.len() != 6 {
            return Err(Error::Parse(format!("expected 6 comma-separated values, got {}", parts.len())));
        }
        Self::parse(parts[0], parts[1], parts[2], parts[3], parts[4], parts[5])
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Geometry {
    /// `N <= m + alpha`
    SubcriticalDim,
    /// `N > m + alpha`
    SupercriticalDim,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum ConvolutionRegime {
    /// `sigma p > beta`
    Above,
    /// `sigma p = beta`
    Balanced,
    /// `sigma p < beta`
    Below,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DerivedExponents {
    pub sigma: f64,
    pub tau: f64,
    /// `N(m-1)/(N-m-alpha)`, absent when `N <= m + alpha`.
    pub nu: Option<f64>,
    /// `(N-m-alpha)/(m-1)`; zero on the logarithmic branch `N = m + alpha`.
    pub phi_exponent: f64,
    pub phi_is_log: bool,
    pub theta_plus: f64,
    /// Strong-branch exponent; absent in the balanced regime `sigma p = beta`.
    pub strong_exponent: Option<f64>,
    pub regime: ConvolutionRegime,
    pub geometry: Geometry,
}

pub fn derive_exponents(params: &ProblemParams) -> DerivedExponents {
    let one = rat(1);
    let sigma = params.exact_sigma();
    let tau = &one / (&params.p + &params.q - &params.m + &one);
    let excess = params.excess();
    let nu = excess.is_positive().then(|| to_f64(&(params.exact_n() * (&params.m - &one) / &excess)));
    let phi_exponent = to_f64(&(&excess / (&params.m - &one)));
    let theta = &sigma * &params.p - &params.beta;
    let theta_plus = if theta.is_positive() { to_f64(&theta) } else { 0.0 };
    let regime = params.convolution_regime();
    let strong_exponent = match regime {
        ConvolutionRegime::Above => Some(to_f64(&sigma)),
        ConvolutionRegime::Balanced => None,
        ConvolutionRegime::Below => Some(to_f64(&local_strong_exponent(params))),
    };
    DerivedExponents {
        sigma: to_f64(&sigma),
        tau: to_f64(&tau),
        nu,
        phi_exponent: if excess.is_zero() { 0.0 } else { phi_exponent },
        phi_is_log: excess.is_zero(),
        theta_plus,
        strong_exponent,
        regime,
        geometry: params.geometry(),
    }
}

/// `(m + alpha)/(q - m + 1)`.
fn local_strong_exponent(params: &ProblemParams) -> BigRational {
    (&params.m + &params.alpha) / (&params.q - &params.m + rat(1))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Existence {
    Yes,
    No,
    Undetermined,
}

/// The three strict inequalities required for existence when `N > m + alpha`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Condition {
    /// `max{p,q} < N(m-1)/(N-m-alpha)`
    MaxPq,
    /// `p+q < (N+beta)(m-1)/(N-m-alpha)`
    SumPq,
    /// `N-2m < 2 alpha + beta`
    Dimension,
}

impl Condition {
    pub fn label(self) -> &'static str {
        match self {
            Condition::MaxPq => "max{p,q} < N(m-1)/(N-m-alpha)",
            Condition::SumPq => "p+q < (N+beta)(m-1)/(N-m-alpha)",
            Condition::Dimension => "N-2m < 2alpha+beta",
        }
    }
}

impl fmt::Display for Condition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

/// One evaluated condition: `bound - value` is the margin, positive when satisfied.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConditionMargin {
    pub condition: Condition,
    pub value: f64,
    pub bound: f64,
    pub margin: f64,
    pub holds: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExistenceVerdict {
    pub exists: Existence,
    pub failed_conditions: Vec<Condition>,
    pub geometry: Geometry,
    pub margins: Vec<ConditionMargin>,
    pub reason: Option<String>,
}

impl ExistenceVerdict {
    /// True when the constructive part applies: existence holds, or the verdict is
    /// undetermined only because `p <= m-1` while every condition still holds.
    pub fn admits_construction(&self) -> bool {
        match self.exists {
            Existence::Yes => true,
            Existence::No => false,
            Existence::Undetermined => self.margins.iter().all(|c| c.holds),
        }
    }
}

fn margin(condition: Condition, value: BigRational, bound: BigRational) -> ConditionMargin {
    ConditionMargin {
        condition,
        value: to_f64(&value),
        bound: to_f64(&bound),
        margin: to_f64(&(&bound - &value)),
        holds: value < bound,
    }
}

pub fn classify_existence(params: &ProblemParams) -> ExistenceVerdict {
    let geometry = params.geometry();
    if geometry == Geometry::SubcriticalDim {
        return ExistenceVerdict {
            exists: Existence::Yes,
            failed_conditions: Vec::new(),
            geometry,
            margins: Vec::new(),
            reason: Some("N <= m+alpha: singular solutions always exist".into()),
        };
    }
    let one = rat(1);
    let excess = params.excess();
    let m1 = &params.m - &one;
    let n = params.exact_n();
    let margins = vec![
        margin(Condition::MaxPq, params.p.clone().max(params.q.clone()), &n * &m1 / &excess),
        margin(Condition::SumPq, &params.p + &params.q, (&n + &params.beta) * &m1 / &excess),
        margin(Condition::Dimension, &n - rat(2) * &params.m, rat(2) * &params.alpha + &params.beta),
    ];
    if params.p <= m1 {
        return ExistenceVerdict {
            exists: Existence::Undetermined,
            failed_conditions: Vec::new(),
            geometry,
            margins,
            reason: Some("N > m+alpha with p <= m-1 lies outside the characterised range".into()),
        };
    }
    let failed: Vec<Condition> = margins.iter().filter(|c| !c.holds).map(|c| c.condition).collect();
    ExistenceVerdict {
        exists: if failed.is_empty() { Existence::Yes } else { Existence::No },
        failed_conditions: failed,
        geometry,
        margins,
        reason: None,
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum ProfileKind {
    Dichotomy,
    OutOfRange,
    BoundaryCase,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum WeakProfile {
    /// `|x|^{-exponent}`
    Power { exponent: f64 },
    /// `log(5/|x|)`
    Log,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProfileClass {
    pub kind: ProfileKind,
    pub weak_profile: WeakProfile,
    pub strong_exponent: Option<f64>,
    /// Upper bound on `q` for the dichotomy; `None` means unbounded (`N = m + alpha`).
    pub q_upper_bound: Option<f64>,
}

pub fn classify_profile(params: &ProblemParams) -> Result<ProfileClass> {
    let excess = params.excess();
    if excess.is_negative() {
        return Err(Error::Precondition("asymptotic classification requires N >= m+alpha".into()));
    }
    let verdict = classify_existence(params);
    if !verdict.admits_construction() {
        return Err(Error::Precondition(format!(
            "asymptotic classification requires existence, got {:?}",
            verdict.exists
        )));
    }
    let one = rat(1);
    let m1 = &params.m - &one;
    let weak_profile =
        if excess.is_zero() { WeakProfile::Log } else { WeakProfile::Power { exponent: to_f64(&(&excess / &m1)) } };
    let sigma = params.exact_sigma();
    let theta = &sigma * &params.p - &params.beta;
    let theta_plus = if theta.is_positive() { theta } else { rat(0) };
    let q_bound = (!excess.is_zero()).then(|| (params.exact_n() - &theta_plus) / &excess * &m1);
    let q_upper_bound = q_bound.as_ref().map(to_f64);
    let in_range = q_bound.as_ref().is_none_or(|b| params.q < *b);
    let regime = params.convolution_regime();
    let (kind, strong_exponent) = if regime == ConvolutionRegime::Balanced {
        (ProfileKind::BoundaryCase, None)
    } else if !in_range {
        (ProfileKind::OutOfRange, None)
    } else if regime == ConvolutionRegime::Above {
        (ProfileKind::Dichotomy, Some(to_f64(&sigma)))
    } else {
        (ProfileKind::Dichotomy, Some(to_f64(&local_strong_exponent(params))))
    };
    Ok(ProfileClass { kind, weak_profile, strong_exponent, q_upper_bound })
}

/// Open interval of admissible decay exponents for `kappa |x|^{-gamma}`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct GammaRange {
    pub lower: BigRational,
    pub upper: BigRational,
}

impl GammaRange {
    pub fn lower_f64(&self) -> f64 {
        to_f64(&self.lower)
    }
    pub fn upper_f64(&self) -> f64 {
        to_f64(&self.upper)
    }
    pub fn contains(&self, gamma: f64) -> bool {
        gamma > self.lower_f64() && gamma < self.upper_f64()
    }
    /// Midpoint, exact.
    pub fn midpoint(&self) -> f64 {
        to_f64(&((&self.lower + &self.upper) / rat(2)))
    }
}

impl Serialize for GammaRange {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        use serde::ser::SerializeStruct;
        let mut st = serializer.serialize_struct("GammaRange", 4)?;
        st.serialize_field("lower", &self.lower_f64())?;
        st.serialize_field("upper", &self.upper_f64())?;
        st.serialize_field("lower_exact", &fmt_rational(&self.lower))?;
        st.serialize_field("upper_exact", &fmt_rational(&self.upper))?;
        st.end()
    }
}

pub fn candidate_gamma_range(params: &ProblemParams) -> Result<GammaRange> {
    let verdict = classify_existence(params);
    if !verdict.admits_construction() {
        return Err(Error::Precondition(format!("gamma range requires existence, got {:?}", verdict.exists)));
    }
    gamma_range_unchecked(params)
}

/// Evaluates the interval formulas without consulting the existence verdict.
pub fn gamma_range_unchecked(params: &ProblemParams) -> Result<GammaRange> {
    let one = rat(1);
    let beta_over_p = &params.beta / &params.p;
    let local = local_strong_exponent(params);
    let (lower, upper) = if params.geometry() == Geometry::SubcriticalDim {
        (rat(0), beta_over_p.min(local))
    } else {
        let phi = params.excess() / (&params.m - &one);
        match params.convolution_regime() {
            ConvolutionRegime::Above => {
                let n_over_p = params.exact_n() / &params.p;
                (phi.max(beta_over_p), params.exact_sigma().min(n_over_p))
            }
            _ => (phi, local),
        }
    };
    if lower >= upper {
        return Err(Error::EmptyRange { lower: to_f64(&lower), upper: to_f64(&upper) });
    }
    Ok(GammaRange { lower, upper })
}

/// Builds the unit-amplitude candidate profile `|x|^{-gamma} (log 5/|x|)^{-tau}`.
pub fn construct_candidate(params: &ProblemParams) -> Result<crate::ansatz::PowerLogProfile> {
    let verdict = classify_existence(params);
    if !verdict.admits_construction() {
        return Err(Error::Precondition(format!(
            "candidate construction requires existence, got {:?}",
            verdict.exists
        )));
    }
    let d = derive_exponents(params);
    let (gamma, tau) = match d.regime {
        ConvolutionRegime::Above => (d.sigma, 0.0),
        ConvolutionRegime::Balanced => (d.sigma, d.tau),
        ConvolutionRegime::Below => (to_f64(&local_strong_exponent(params)), 0.0),
    };
    crate::ansatz::PowerLogProfile::new(1.0, gamma, tau)
}
