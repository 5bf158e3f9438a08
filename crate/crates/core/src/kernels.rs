//! Radially symmetric kernels described through their profile `k`.
//!
//! A kernel is `K(v) = k(|v|^2 / 2)`. The update weights use `G(v) = g(|v|^2 / 2)`
//! where `g(0) = -k'(0+)` and, for `u > 0`, `g(u) = -k'(u-)` (the left
//! derivative). With that selection the Epanechnikov weight is
//! `G(v/h) = 1(|v| <= beta * h)`, closed at the truncation radius.
//!
//! Profiles are unnormalized with `k(0) = 1`. Normalizing constants cancel in
//! the update rules and only rescale the objective.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{check_bandwidth, BmsError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KernelId {
    Epanechnikov,
    Cosine,
    Quadweight,
    Triweight,
    Biweight,
    ThreeHalves,
    Gaussian,
    Logistic,
    Cauchy,
    /// `(1 - u^{3/2})^3`: concave near the origin, so it is not admissible for
    /// the update rules. Kept for validation.
    Tricube,
    Custom,
}

impl KernelId {
    /// Built-in kernels whose profile is convex, non-increasing and has a
    /// finite slope at the origin.
    pub const ADMISSIBLE: [KernelId; 9] = [
        KernelId::Epanechnikov,
        KernelId::Cosine,
        KernelId::Quadweight,
        KernelId::Triweight,
        KernelId::Biweight,
        KernelId::ThreeHalves,
        KernelId::Gaussian,
        KernelId::Logistic,
        KernelId::Cauchy,
    ];

    pub fn name(self) -> &'static str {
        match self {
            KernelId::Epanechnikov => "epanechnikov",
            KernelId::Cosine => "cosine",
            KernelId::Quadweight => "quadweight",
            KernelId::Triweight => "triweight",
            KernelId::Biweight => "biweight",
            KernelId::ThreeHalves => "three_halves",
            KernelId::Gaussian => "gaussian",
            KernelId::Logistic => "logistic",
            KernelId::Cauchy => "cauchy",
            KernelId::Tricube => "tricube",
            KernelId::Custom => "custom",
        }
    }
}

impl fmt::Display for KernelId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for KernelId {
    type Err = BmsError;

    fn from_str(s: &str) -> Result<Self> {
        let id = match s.trim().to_ascii_lowercase().replace('-', "_").as_str() {
            "epanechnikov" => KernelId::Epanechnikov,
            "cosine" => KernelId::Cosine,
            "quadweight" => KernelId::Quadweight,
            "triweight" => KernelId::Triweight,
            "biweight" => KernelId::Biweight,
            "three_halves" | "threehalves" => KernelId::ThreeHalves,
            "gaussian" => KernelId::Gaussian,
            "logistic" => KernelId::Logistic,
            "cauchy" => KernelId::Cauchy,
            "tricube" => KernelId::Tricube,
            _ => return Err(BmsError::UnknownKernel(s.to_string())),
        };
        Ok(id)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TruncationClass {
    NonTruncated,
    SmoothlyTruncated,
    NonSmoothlyTruncated,
}

/// Piecewise-linear profile through `(u_i, k_i)` knots, constant after the last knot.
#[derive(Debug, Clone, PartialEq)]
struct SampledProfile {
    u: Vec<f64>,
    k: Vec<f64>,
}

impl SampledProfile {
    fn new(samples: &[[f64; 2]]) -> Result<Self> {
        if samples.len() < 2 {
            return Err(BmsError::Configuration(
                "sampled profile needs at least two knots".into(),
            ));
        }
        if samples[0][0] != 0.0 {
            return Err(BmsError::Configuration(
                "sampled profile must start at u = 0".into(),
            ));
        }
        if samples.iter().any(|s| !s[0].is_finite() || !s[1].is_finite()) {
            return Err(BmsError::Configuration("non-finite profile sample".into()));
        }
        if samples.windows(2).any(|w| w[1][0] <= w[0][0]) {
            return Err(BmsError::Configuration(
                "profile knots must be strictly increasing in u".into(),
            ));
        }
        let k0 = samples[0][1];
        if k0 <= 0.0 {
            return Err(BmsError::Configuration("profile must have k(0) > 0".into()));
        }
        Ok(Self {
            u: samples.iter().map(|s| s[0]).collect(),
            k: samples.iter().map(|s| s[1] / k0).collect(),
        })
    }

    fn k(&self, u: f64) -> f64 {
        let last = self.u.len() - 1;
        if u >= self.u[last] {
            return self.k[last];
        }
        let seg = self.u.partition_point(|&x| x <= u) - 1;
        let t = (u - self.u[seg]) / (self.u[seg + 1] - self.u[seg]);
        self.k[seg] + t * (self.k[seg + 1] - self.k[seg])
    }

    fn slope(&self, seg: usize) -> f64 {
        (self.k[seg + 1] - self.k[seg]) / (self.u[seg + 1] - self.u[seg])
    }

    fn g(&self, u: f64) -> f64 {
        let last = self.u.len() - 1;
        if u == 0.0 {
            return -self.slope(0);
        }
        if u > self.u[last] {
            return 0.0;
        }
        // left derivative: the segment ending at or after u
        let seg = self.u.partition_point(|&x| x < u) - 1;
        -self.slope(seg)
    }

    /// Smallest knot after which the profile stays at zero.
    fn zero_onset(&self) -> Option<f64> {
        let last = self.u.len() - 1;
        if self.k[last] != 0.0 {
            return None;
        }
        let mut idx = last;
        while idx > 0 && self.k[idx - 1] == 0.0 {
            idx -= 1;
        }
        Some(self.u[idx])
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Profile {
    Builtin(KernelId),
    Sampled(SampledProfile),
}

/// JSON descriptor for a user-supplied kernel.
///
/// Exactly one of `closed_form` or `samples` must be present. `beta` is the
/// truncation radius; omit it (or use `null`) for a non-truncated kernel.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KernelDescriptor {
    #[serde(default)]
    pub name: Option<String>,
    #[serde(default)]
    pub closed_form: Option<String>,
    #[serde(default)]
    pub samples: Option<Vec<[f64; 2]>>,
    #[serde(default)]
    pub beta: Option<f64>,
    pub class: TruncationClass,
}

/// An immutable kernel: profile, weight function, truncation data.
#[derive(Debug, Clone, PartialEq)]
pub struct KernelSpec {
    id: KernelId,
    name: String,
    profile: Profile,
    beta: f64,
    class: TruncationClass,
    g0: f64,
    alpha: Option<f64>,
}

/// Truncation point (as a radius) and smoothness class of a kernel.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Truncation {
    pub beta: f64,
    pub class: TruncationClass,
}

impl KernelSpec {
    pub fn builtin(id: KernelId) -> Result<Self> {
        if id == KernelId::Custom {
            return Err(BmsError::Configuration(
                "custom kernels are built from a descriptor".into(),
            ));
        }
        let Truncation { beta, class } = builtin_truncation(id);
        let profile = Profile::Builtin(id);
        let g0 = builtin_g(id, 0.0);
        let alpha = match (id, class) {
            (KernelId::Epanechnikov, _) => Some(1.0),
            // g(1-) / g(0) = (pi/4) / (pi^2/8)
            (KernelId::Cosine, _) => Some(2.0 / PI),
            _ => None,
        };
        Ok(Self {
            id,
            name: id.name().to_string(),
            profile,
            beta,
            class,
            g0,
            alpha,
        })
    }

    pub fn from_name(name: &str) -> Result<Self> {
        Self::builtin(name.parse()?)
    }

    pub fn from_descriptor(desc: &KernelDescriptor) -> Result<Self> {
        let beta = match desc.beta {
            Some(b) if b > 0.0 && b.is_finite() => b,
            Some(b) => {
                return Err(BmsError::Configuration(format!(
                    "truncation point must be positive and finite, got {b}"
                )))
            }
            None => f64::INFINITY,
        };
        match (desc.class, beta.is_finite()) {
            (TruncationClass::NonTruncated, true) => {
                return Err(BmsError::Configuration(
                    "non-truncated kernel cannot declare a finite beta".into(),
                ))
            }
            (TruncationClass::SmoothlyTruncated | TruncationClass::NonSmoothlyTruncated, false) => {
                return Err(BmsError::Configuration(
                    "truncated kernel must declare beta".into(),
                ))
            }
            _ => {}
        }
        let name = desc.name.clone().unwrap_or_else(|| "custom".to_string());

        let mut spec = match (&desc.closed_form, &desc.samples) {
            (Some(id), None) => {
                let base = Self::from_name(id)?;
                if base.class != desc.class || !same_beta(base.beta, beta) {
                    return Err(BmsError::Configuration(format!(
                        "declared truncation ({beta}, {:?}) does not match `{id}` ({}, {:?})",
                        desc.class, base.beta, base.class
                    )));
                }
                base
            }
            (None, Some(samples)) => {
                let sampled = SampledProfile::new(samples)?;
                let onset = sampled.zero_onset().map(|u| (2.0 * u).sqrt());
                let consistent = match onset {
                    Some(b) => same_beta(b, beta),
                    None => beta.is_infinite(),
                };
                if !consistent {
                    return Err(BmsError::Configuration(format!(
                        "declared beta {beta} does not match the sampled profile support"
                    )));
                }
                let g0 = sampled.g(0.0);
                Self {
                    id: KernelId::Custom,
                    name: String::new(),
                    profile: Profile::Sampled(sampled),
                    beta,
                    class: desc.class,
                    g0,
                    alpha: None,
                }
            }
            _ => {
                return Err(BmsError::Configuration(
                    "descriptor needs exactly one of `closed_form` or `samples`".into(),
                ))
            }
        };
        spec.name = name;
        if spec.g0 <= 0.0 || !spec.g0.is_finite() {
            return Err(BmsError::Configuration(format!(
                "g(0) must be positive and finite, got {}",
                spec.g0
            )));
        }
        if spec.class == TruncationClass::NonSmoothlyTruncated && spec.alpha.is_none() {
            spec.alpha = Some(sampled_alpha(&spec, 100_000));
        }
        Ok(spec)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let desc: KernelDescriptor = serde_json::from_str(text)
            .map_err(|e| BmsError::Configuration(format!("kernel descriptor: {e}")))?;
        Self::from_descriptor(&desc)
    }

    pub fn id(&self) -> KernelId {
        self.id
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    /// Truncation radius `beta`; `f64::INFINITY` for non-truncated kernels.
    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn truncation_class(&self) -> TruncationClass {
        self.class
    }

    pub fn is_truncated(&self) -> bool {
        self.class != TruncationClass::NonTruncated
    }

    /// Whether `K` is differentiable everywhere (non-truncated or smoothly truncated).
    pub fn is_smooth(&self) -> bool {
        self.class != TruncationClass::NonSmoothlyTruncated
    }

    pub fn g0(&self) -> f64 {
        self.g0
    }

    /// `inf { g(u)/g(0) : g(u) != 0 }`, defined for non-smoothly truncated kernels.
    pub fn alpha(&self) -> Option<f64> {
        self.alpha
    }

    /// Whether the profile satisfies the admissibility conditions used by the
    /// update rules (only tricube among the built-ins fails).
    pub fn is_admissible(&self) -> bool {
        self.id != KernelId::Tricube && self.g0 > 0.0
    }

    /// Profile value `k(u)`; `u` is assumed non-negative.
    #[inline]
    pub fn k(&self, u: f64) -> f64 {
        match &self.profile {
            Profile::Builtin(id) => builtin_k(*id, u),
            Profile::Sampled(s) => s.k(u),
        }
    }

    /// Weight function `g(u)`; `u` is assumed non-negative.
    #[inline]
    pub fn g(&self, u: f64) -> f64 {
        match &self.profile {
            Profile::Builtin(id) => builtin_g(*id, u),
            Profile::Sampled(s) => s.g(u),
        }
    }

    pub fn eval_k(&self, u: f64) -> Result<f64> {
        check_domain(u)?;
        Ok(self.k(u))
    }

    pub fn eval_g(&self, u: f64) -> Result<f64> {
        check_domain(u)?;
        Ok(self.g(u))
    }

    /// `K(v/h) = k(|v/h|^2 / 2)`.
    pub fn kernel_value(&self, v: &[f64], h: f64) -> Result<f64> {
        check_bandwidth(h)?;
        Ok(self.k_of_sq(norm_sq(v), h))
    }

    /// `G(v/h) = g(|v/h|^2 / 2)`.
    pub fn g_value(&self, v: &[f64], h: f64) -> Result<f64> {
        check_bandwidth(h)?;
        Ok(self.g_of_sq(norm_sq(v), h))
    }

    #[inline]
    pub(crate) fn k_of_sq(&self, dist_sq: f64, h: f64) -> f64 {
        self.k(dist_sq / (2.0 * h * h))
    }

    #[inline]
    pub(crate) fn g_of_sq(&self, dist_sq: f64, h: f64) -> f64 {
        self.g(dist_sq / (2.0 * h * h))
    }

    /// `u` at which `g` may jump (`beta^2 / 2`), for non-smoothly truncated kernels.
    pub fn kink(&self) -> Option<f64> {
        if self.class != TruncationClass::NonSmoothlyTruncated {
            return None;
        }
        // built-in truncated profiles all vanish at u = 1; beta^2/2 would round above it
        Some(match self.profile {
            Profile::Builtin(_) => 1.0,
            Profile::Sampled(_) => self.beta * self.beta / 2.0,
        })
    }

    /// `g(0) - g(u)` evaluated without cancellation for small `u`.
    pub fn g_deficit(&self, u: f64) -> f64 {
        match &self.profile {
            Profile::Builtin(id) => builtin_deficit(*id, u),
            Profile::Sampled(s) => s.g(0.0) - s.g(u),
        }
    }

    /// `lim_{u -> 0+} (g(0) - g(u)) / u` when known in closed form.
    pub fn deficit_slope(&self) -> Option<f64> {
        match &self.profile {
            Profile::Builtin(id) => match id {
                KernelId::Epanechnikov => Some(0.0),
                KernelId::Cosine => Some(PI.powi(4) / 192.0),
                KernelId::Quadweight => Some(12.0),
                KernelId::Triweight => Some(6.0),
                KernelId::Biweight => Some(2.0),
                KernelId::ThreeHalves => Some(0.75),
                KernelId::Gaussian => Some(1.0),
                KernelId::Logistic => Some(1.0 / 12.0),
                KernelId::Cauchy => Some(2.0),
                KernelId::Tricube | KernelId::Custom => None,
            },
            // g is constant on the first segment
            Profile::Sampled(_) => Some(0.0),
        }
    }
}

fn same_beta(a: f64, b: f64) -> bool {
    if a.is_infinite() || b.is_infinite() {
        return a == b;
    }
    (a - b).abs() <= 1e-9 * a.abs().max(b.abs())
}

fn check_domain(u: f64) -> Result<()> {
    if u >= 0.0 {
        Ok(())
    } else {
        Err(BmsError::Domain { value: u })
    }
}

#[inline]
pub(crate) fn norm_sq(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum()
}

fn builtin_truncation(id: KernelId) -> Truncation {
    use KernelId::*;
    // every truncated built-in vanishes from u = 1, i.e. at radius sqrt(2)
    let sqrt2 = std::f64::consts::SQRT_2;
    match id {
        Epanechnikov | Cosine => Truncation {
            beta: sqrt2,
            class: TruncationClass::NonSmoothlyTruncated,
        },
        Quadweight | Triweight | Biweight | ThreeHalves | Tricube => Truncation {
            beta: sqrt2,
            class: TruncationClass::SmoothlyTruncated,
        },
        Gaussian | Logistic | Cauchy | Custom => Truncation {
            beta: f64::INFINITY,
            class: TruncationClass::NonTruncated,
        },
    }
}

/// Truncation point and class; built-ins are analytic, custom kernels use
/// their declared values.
pub fn classify_truncation(spec: &KernelSpec) -> Truncation {
    Truncation {
        beta: spec.beta,
        class: spec.class,
    }
}

fn builtin_k(id: KernelId, u: f64) -> f64 {
    use KernelId::*;
    let rest = 1.0 - u;
    match id {
        Epanechnikov => rest.max(0.0),
        Cosine => {
            if u <= 1.0 {
                (0.5 * PI * u.sqrt()).cos()
            } else {
                0.0
            }
        }
        Quadweight => rest.max(0.0).powi(4),
        Triweight => rest.max(0.0).powi(3),
        Biweight => rest.max(0.0).powi(2),
        ThreeHalves => rest.max(0.0).powf(1.5),
        Gaussian => (-u).exp(),
        Logistic => {
            let sech = 1.0 / (0.5 * u.sqrt()).cosh();
            sech * sech
        }
        Cauchy => 1.0 / (1.0 + u),
        Tricube => {
            if u < 1.0 {
                (1.0 - u.powf(1.5)).powi(3)
            } else {
                0.0
            }
        }
        Custom => unreachable!("custom kernels carry a sampled profile"),
    }
}

fn builtin_g(id: KernelId, u: f64) -> f64 {
    use KernelId::*;
    let rest = 1.0 - u;
    match id {
        Epanechnikov => {
            if u <= 1.0 {
                1.0
            } else {
                0.0
            }
        }
        Cosine => {
            if u == 0.0 {
                PI * PI / 8.0
            } else if u <= 1.0 {
                let s = u.sqrt();
                0.25 * PI * (0.5 * PI * s).sin() / s
            } else {
                0.0
            }
        }
        Quadweight => 4.0 * rest.max(0.0).powi(3),
        Triweight => 3.0 * rest.max(0.0).powi(2),
        Biweight => 2.0 * rest.max(0.0),
        ThreeHalves => 1.5 * rest.max(0.0).sqrt(),
        Gaussian => (-u).exp(),
        Logistic => {
            if u == 0.0 {
                0.25
            } else {
                let a = 0.5 * u.sqrt();
                let sech = 1.0 / a.cosh();
                sech * sech * a.tanh() / (4.0 * a)
            }
        }
        Cauchy => {
            let q = 1.0 + u;
            1.0 / (q * q)
        }
        Tricube => {
            if u < 1.0 {
                let r = 1.0 - u.powf(1.5);
                4.5 * u.sqrt() * r * r
            } else {
                0.0
            }
        }
        Custom => unreachable!("custom kernels carry a sampled profile"),
    }
}

/// `a - tanh(a)` via its Taylor series, for `|a| < 0.1`.
fn a_minus_tanh_series(a: f64) -> f64 {
    const C: [f64; 7] = [
        1.0 / 3.0,
        -2.0 / 15.0,
        17.0 / 315.0,
        -62.0 / 2835.0,
        1382.0 / 155_925.0,
        -21_844.0 / 6_081_075.0,
        929_569.0 / 638_512_875.0,
    ];
    let a2 = a * a;
    let mut acc = 0.0;
    for c in C.iter().rev() {
        acc = acc * a2 + c;
    }
    acc * a2 * a
}

fn builtin_deficit(id: KernelId, u: f64) -> f64 {
    use KernelId::*;
    match id {
        Epanechnikov => {
            if u <= 1.0 {
                0.0
            } else {
                1.0
            }
        }
        Cosine => {
            let z2 = PI * PI * u / 4.0;
            if u > 1.0 {
                PI * PI / 8.0
            } else if z2 < 0.1 {
                // sin(z)/z = 1 - z^2/6 + z^4/120 - z^6/5040 + z^8/362880 - ...
                let series = z2 / 6.0 - z2 * z2 / 120.0 + z2.powi(3) / 5040.0
                    - z2.powi(4) / 362_880.0
                    + z2.powi(5) / 39_916_800.0;
                PI * PI / 8.0 * series
            } else {
                PI * PI / 8.0 - builtin_g(Cosine, u)
            }
        }
        Quadweight => {
            if u <= 1.0 {
                4.0 * u * (3.0 - 3.0 * u + u * u)
            } else {
                4.0
            }
        }
        Triweight => {
            if u <= 1.0 {
                3.0 * u * (2.0 - u)
            } else {
                3.0
            }
        }
        Biweight => 2.0 * u.min(1.0),
        ThreeHalves => {
            if u <= 1.0 {
                1.5 * u / (1.0 + (1.0 - u).sqrt())
            } else {
                1.5
            }
        }
        Gaussian => -(-u).exp_m1(),
        Logistic => {
            if u == 0.0 {
                return 0.0;
            }
            let a = 0.5 * u.sqrt();
            let diff = if a < 0.1 { a_minus_tanh_series(a) } else { a - a.tanh() };
            let t = a.tanh();
            0.25 * (diff + t * t * t) / a
        }
        Cauchy => {
            let q = 1.0 + u;
            u * (2.0 + u) / (q * q)
        }
        Tricube => -builtin_g(Tricube, u),
        Custom => unreachable!("custom kernels carry a sampled profile"),
    }
}

/// Numerical `inf { g(u)/g(0) : g(u) != 0 }` over a uniform sample of `(0, beta^2/2]`.
fn sampled_alpha(spec: &KernelSpec, samples: usize) -> f64 {
    let top = if spec.beta.is_finite() {
        spec.beta * spec.beta / 2.0
    } else {
        4.0
    };
    (1..=samples)
        .map(|i| spec.g(top * i as f64 / samples as f64))
        .filter(|&g| g != 0.0)
        .fold(1.0_f64, |m, g| m.min(g / spec.g0))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CheckOutcome {
    pub name: &'static str,
    pub passed: bool,
    /// Largest violation found (0 when passed).
    pub worst_violation: f64,
    /// Argument `u` (or radius, for the truncation check) of the worst violation.
    pub at: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Assumption1Report {
    pub kernel: String,
    pub grid_size: usize,
    pub passed: bool,
    pub checks: Vec<CheckOutcome>,
}

impl Assumption1Report {
    pub fn check(&self, name: &str) -> Option<&CheckOutcome> {
        self.checks.iter().find(|c| c.name == name)
    }
}

struct Worst {
    name: &'static str,
    violation: f64,
    at: Option<f64>,
}

impl Worst {
    fn new(name: &'static str) -> Self {
        Self {
            name,
            violation: 0.0,
            at: None,
        }
    }

    fn record(&mut self, violation: f64, at: f64) {
        if violation > self.violation || (violation.is_nan() && self.at.is_none()) {
            self.violation = violation;
            self.at = Some(at);
        }
    }

    fn finish(self, tol: f64) -> CheckOutcome {
        CheckOutcome {
            name: self.name,
            passed: self.violation <= tol,
            worst_violation: self.violation,
            at: self.at,
        }
    }
}

/// Grid-based numerical check of the profile conditions: non-negative, bounded,
/// non-increasing, convex, finite positive slope at the origin; plus the
/// derived properties of `g` and the declared truncation point.
pub fn validate_assumption1(spec: &KernelSpec, grid_size: usize) -> Result<Assumption1Report> {
    if grid_size < 3 {
        return Err(BmsError::Parameter {
            name: "grid_size",
            reason: format!("need at least 3 grid points, got {grid_size}"),
        });
    }
    const TOL: f64 = 1e-12;
    let top = if spec.beta.is_finite() {
        (spec.beta * spec.beta / 2.0 * 1.5).max(4.0)
    } else {
        4.0
    };
    let step = top / (grid_size - 1) as f64;
    let grid: Vec<f64> = (0..grid_size).map(|i| i as f64 * step).collect();
    let ks: Vec<f64> = grid.iter().map(|&u| spec.k(u)).collect();
    let gs: Vec<f64> = grid.iter().map(|&u| spec.g(u)).collect();
    let k0 = ks[0];

    let mut non_negative = Worst::new("non_negative");
    let mut bounded = Worst::new("bounded");
    let mut non_increasing = Worst::new("non_increasing");
    let mut convex = Worst::new("convex");
    let mut g_non_negative = Worst::new("g_non_negative");
    let mut g_non_increasing = Worst::new("g_non_increasing");
    let mut zero_weight_zero_profile = Worst::new("g_zero_implies_k_zero");

    for (i, (&u, (&k, &g))) in grid.iter().zip(ks.iter().zip(&gs)).enumerate() {
        non_negative.record(-k, u);
        let excess = if k.is_finite() { k - k0 } else { f64::INFINITY };
        bounded.record(excess, u);
        g_non_negative.record(-g, u);
        if g == 0.0 {
            zero_weight_zero_profile.record(k.abs(), u);
        }
        if i > 0 {
            non_increasing.record(k - ks[i - 1], u);
            g_non_increasing.record(g - gs[i - 1], u);
        }
        if i > 0 && i + 1 < grid.len() {
            // midpoint convexity on consecutive triples
            convex.record(2.0 * k - ks[i - 1] - ks[i + 1], u);
        }
    }

    let slope_ok = spec.g0 > 0.0 && spec.g0.is_finite();
    let origin_slope = CheckOutcome {
        name: "finite_positive_slope_at_origin",
        passed: slope_ok,
        worst_violation: if slope_ok { 0.0 } else { 1.0 },
        at: Some(0.0),
    };

    let mut truncation = Worst::new("truncation_point");
    if spec.beta.is_finite() {
        let radii = grid_size.min(4096);
        for i in 0..radii {
            let r = 1.5 * spec.beta * i as f64 / (radii - 1) as f64;
            let k = spec.k(r * r / 2.0);
            if r >= spec.beta {
                truncation.record(k.abs(), r);
            } else if k <= 0.0 {
                truncation.record(1.0, r);
            }
        }
    }

    let checks = vec![
        non_negative.finish(TOL),
        bounded.finish(TOL),
        non_increasing.finish(TOL),
        convex.finish(TOL),
        origin_slope,
        g_non_negative.finish(TOL),
        g_non_increasing.finish(TOL),
        zero_weight_zero_profile.finish(TOL),
        truncation.finish(0.0),
    ];
    Ok(Assumption1Report {
        kernel: spec.name.clone(),
        grid_size,
        passed: checks.iter().all(|c| c.passed),
        checks,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn spec(id: KernelId) -> KernelSpec {
        KernelSpec::builtin(id).unwrap()
    }

    #[test]
    fn profile_values() {
        let epa = spec(KernelId::Epanechnikov);
        assert_eq!(epa.eval_k(0.0).unwrap(), 1.0);
        assert_eq!(epa.eval_k(2.0).unwrap(), 0.0);
        assert_abs_diff_eq!(
            spec(KernelId::Gaussian).eval_k(0.5).unwrap(),
            0.606_530_659_712_633_4,
            epsilon = 1e-15
        );
        assert!(matches!(epa.eval_k(-1e-3), Err(BmsError::Domain { .. })));
        assert!(epa.eval_g(f64::NAN).is_err());
    }

    #[test]
    fn weight_values() {
        let epa = spec(KernelId::Epanechnikov);
        assert_eq!(epa.eval_g(0.5).unwrap(), 1.0);
        assert_eq!(epa.eval_g(1.5).unwrap(), 0.0);
        assert_eq!(epa.eval_g(1.0).unwrap(), 1.0);
        assert_abs_diff_eq!(spec(KernelId::Biweight).eval_g(0.25).unwrap(), 1.5);
    }

    #[test]
    fn kernel_and_weight_of_vectors() {
        let gauss = spec(KernelId::Gaussian);
        assert_eq!(gauss.kernel_value(&[0.0, 0.0], 3.7).unwrap(), 1.0);
        let epa = spec(KernelId::Epanechnikov);
        assert_abs_diff_eq!(epa.kernel_value(&[0.3, 0.4], 0.5).unwrap(), 0.5, epsilon = 1e-15);
        assert_eq!(epa.kernel_value(&[1.0], 0.5).unwrap(), 0.0);
        assert!(epa.kernel_value(&[1.0], 0.0).is_err());
        assert!(epa.g_value(&[1.0], -1.0).is_err());

        // |v| = sqrt(2) h exactly when v = (1, 1), h = 1
        assert_eq!(epa.g_value(&[1.0, 1.0], 1.0).unwrap(), 1.0);
        assert_eq!(epa.g_value(&[1.5, 1.5], 1.0).unwrap(), 0.0);
        assert_abs_diff_eq!(
            gauss.g_value(&[0.0, 2.0], 2.0).unwrap(),
            (-0.5f64).exp(),
            epsilon = 1e-15
        );
    }

    #[test]
    fn truncation_classes() {
        let t = classify_truncation(&spec(KernelId::Epanechnikov));
        assert_eq!(t.class, TruncationClass::NonSmoothlyTruncated);
        assert_abs_diff_eq!(t.beta, 2f64.sqrt());
        let t = classify_truncation(&spec(KernelId::Gaussian));
        assert_eq!(t.class, TruncationClass::NonTruncated);
        assert!(t.beta.is_infinite());
        let t = classify_truncation(&spec(KernelId::Biweight));
        assert_eq!(t.class, TruncationClass::SmoothlyTruncated);
        assert_abs_diff_eq!(t.beta, 2f64.sqrt());
    }

    #[test]
    fn radial_section_slope_at_beta_matches_class() {
        // one-sided finite differences of k(r^2/2) at r = beta
        for id in KernelId::ADMISSIBLE {
            let s = spec(id);
            if !s.is_truncated() {
                continue;
            }
            let b = s.beta();
            let eps = 1e-7;
            let radial = |r: f64| s.k(r * r / 2.0);
            let left = (radial(b) - radial(b - eps)) / eps;
            let smooth = left.abs() < 1e-3;
            assert_eq!(smooth, s.truncation_class() == TruncationClass::SmoothlyTruncated, "{id}");
        }
    }

    #[test]
    fn admissible_kernels_pass_validation() {
        for id in KernelId::ADMISSIBLE {
            let report = validate_assumption1(&spec(id), 10_000).unwrap();
            assert!(report.passed, "{id}: {:?}", report.checks);
        }
    }

    #[test]
    fn tricube_fails_convexity() {
        let report = validate_assumption1(&spec(KernelId::Tricube), 10_000).unwrap();
        assert!(!report.passed);
        assert!(!report.check("convex").unwrap().passed);
        assert!(!report.check("finite_positive_slope_at_origin").unwrap().passed);
        assert!(validate_assumption1(&spec(KernelId::Tricube), 2).is_err());
    }

    #[test]
    fn g_matches_left_derivative_of_profile() {
        for id in KernelId::ADMISSIBLE {
            let s = spec(id);
            for &u in &[0.05, 0.3, 0.7, 0.95, 1.6, 3.0] {
                let eps = 1e-6;
                let fd = -(s.k(u) - s.k(u - eps)) / eps;
                let tol = 1e-4 * s.g0().max(1.0);
                assert!((fd - s.g(u)).abs() < tol, "{id} u={u} fd={fd} g={}", s.g(u));
            }
            let fd0 = -(s.k(1e-9) - s.k(0.0)) / 1e-9;
            assert!((fd0 - s.g0()).abs() < 1e-4, "{id} g0 {fd0} vs {}", s.g0());
        }
    }

    #[test]
    fn deficit_is_consistent_with_direct_difference() {
        for id in KernelId::ADMISSIBLE {
            let s = spec(id);
            for &u in &[1e-12, 1e-6, 1e-3, 0.02, 0.2, 0.5, 0.9, 2.0] {
                let direct = s.g0() - s.g(u);
                let stable = s.g_deficit(u);
                let tol = 8.0 * f64::EPSILON * s.g0() + 1e-12 * stable.abs();
                assert!((direct - stable).abs() <= tol, "{id} u={u}: {direct} vs {stable}");
            }
            let slope = s.deficit_slope().unwrap();
            let u = 1e-9;
            assert!((s.g_deficit(u) / u - slope).abs() <= 1e-6 * slope.max(1.0), "{id}");
        }
    }

    #[test]
    fn alpha_values() {
        assert_eq!(spec(KernelId::Epanechnikov).alpha(), Some(1.0));
        let cos = spec(KernelId::Cosine);
        let numeric = sampled_alpha(&cos, 200_000);
        assert_abs_diff_eq!(cos.alpha().unwrap(), numeric, epsilon = 1e-5);
        assert!(cos.alpha().unwrap() > 0.0);
        assert_eq!(spec(KernelId::Gaussian).alpha(), None);
    }

    #[test]
    fn custom_descriptor_sampled() {
        let json = r#"{"name":"tent","samples":[[0,2],[0.5,1],[1,0]],"beta":1.4142135623730951,
                       "class":"non_smoothly_truncated"}"#;
        let s = KernelSpec::from_json(json).unwrap();
        assert_eq!(s.id(), KernelId::Custom);
        assert_eq!(s.name(), "tent");
        assert_eq!(s.k(0.0), 1.0);
        assert_abs_diff_eq!(s.k(0.25), 0.75);
        assert_eq!(s.g(0.0), 1.0);
        assert_eq!(s.g(1.0), 1.0);
        assert_eq!(s.g(1.0 + 1e-12), 0.0);
        assert_eq!(s.alpha(), Some(1.0));
        assert!(validate_assumption1(&s, 1000).unwrap().passed);
    }

    #[test]
    fn custom_descriptor_errors() {
        // truncated class without beta
        let missing = r#"{"samples":[[0,1],[1,0]],"class":"smoothly_truncated"}"#;
        assert!(matches!(KernelSpec::from_json(missing), Err(BmsError::Configuration(_))));
        // beta inconsistent with the support
        let wrong = r#"{"samples":[[0,1],[1,0]],"beta":3.0,"class":"non_smoothly_truncated"}"#;
        assert!(KernelSpec::from_json(wrong).is_err());
        // closed form with mismatched class
        let mismatch = r#"{"closed_form":"gaussian","beta":1.0,"class":"smoothly_truncated"}"#;
        assert!(KernelSpec::from_json(mismatch).is_err());
        let ok = r#"{"closed_form":"gaussian","class":"non_truncated"}"#;
        assert_eq!(KernelSpec::from_json(ok).unwrap().id(), KernelId::Gaussian);
        assert!(KernelSpec::from_json(r#"{"class":"non_truncated"}"#).is_err());
    }

    #[test]
    fn kernel_names_round_trip() {
        for id in KernelId::ADMISSIBLE {
            assert_eq!(id.name().parse::<KernelId>().unwrap(), id);
        }
        assert!("uniform".parse::<KernelId>().is_err());
        assert_eq!("three-halves".parse::<KernelId>().unwrap(), KernelId::ThreeHalves);
    }
}
