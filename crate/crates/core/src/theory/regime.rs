//! Classification of the scaling limits of the field and of the workload.
//!
//! The decision logic is written once, generic over [`RegimeScalar`], and
//! instantiated for `f64` (ties within relative tolerance `1e-12`) and for
//! exact rationals.

use std::cmp::Ordering;
use std::fmt;
use std::ops::{Add, Div, Mul, Sub};

use num_rational::Ratio;

use super::exponents::{check_alpha_p, h_minus, h_plus};
use crate::error::{Error, Result};

/// Exact rational input for boundary-sensitive classification.
pub type Rational = Ratio<i128>;

/// Relative tolerance used when comparing `f64` boundary expressions.
pub const BOUNDARY_REL_TOL: f64 = 1e-12;

pub trait RegimeScalar:
    Copy + Add<Output = Self> + Sub<Output = Self> + Mul<Output = Self> + Div<Output = Self>
{
    fn int(v: i64) -> Self;
    fn compare(self, other: Self) -> Ordering;
    fn to_f64(self) -> f64;
}

impl RegimeScalar for f64 {
    fn int(v: i64) -> Self {
        v as f64
    }

    fn compare(self, other: Self) -> Ordering {
        let scale = self.abs().max(other.abs());
        if (self - other).abs() <= BOUNDARY_REL_TOL * scale {
            Ordering::Equal
        } else if self < other {
            Ordering::Less
        } else {
            Ordering::Greater
        }
    }

    fn to_f64(self) -> f64 {
        self
    }
}

impl RegimeScalar for Rational {
    fn int(v: i64) -> Self {
        Ratio::from_integer(v as i128)
    }

    fn compare(self, other: Self) -> Ordering {
        self.cmp(&other)
    }

    fn to_f64(self) -> f64 {
        *self.numer() as f64 / *self.denom() as f64
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum FieldFamily {
    StableSheet,
    StableSlidePlus,
    StableSlideMinus,
    FbsPlus,
    FbsMinus,
    FbsLogPlus,
    FbsLogMinus,
    IntermediatePlus,
    IntermediateMinus,
}

impl FieldFamily {
    pub const ALL: [FieldFamily; 9] = [
        FieldFamily::StableSheet,
        FieldFamily::StableSlidePlus,
        FieldFamily::StableSlideMinus,
        FieldFamily::FbsPlus,
        FieldFamily::FbsMinus,
        FieldFamily::FbsLogPlus,
        FieldFamily::FbsLogMinus,
        FieldFamily::IntermediatePlus,
        FieldFamily::IntermediateMinus,
    ];

    /// The family on the other side of the `x <-> y` reflection.
    pub fn mirror(self) -> FieldFamily {
        use FieldFamily::*;
        match self {
            StableSheet => StableSheet,
            StableSlidePlus => StableSlideMinus,
            StableSlideMinus => StableSlidePlus,
            FbsPlus => FbsMinus,
            FbsMinus => FbsPlus,
            FbsLogPlus => FbsLogMinus,
            FbsLogMinus => FbsLogPlus,
            IntermediatePlus => IntermediateMinus,
            IntermediateMinus => IntermediatePlus,
        }
    }

    pub fn is_plus_side(self) -> bool {
        use FieldFamily::*;
        matches!(self, StableSlidePlus | FbsPlus | FbsLogPlus | IntermediatePlus)
    }

    pub fn is_minus_side(self) -> bool {
        self != FieldFamily::StableSheet && !self.is_plus_side()
    }
}

impl fmt::Display for FieldFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

/// Shape of the limit object: stability index or Hurst pair.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum FieldLimit {
    /// Levy sheet with independent stable increments.
    StableSheet { index: f64 },
    /// `x L_+(y)` (`along_y`) or `y L_-(x)`.
    StableLine { index: f64, along_y: bool },
    /// Fractional Brownian sheet `B_{h1,h2}`.
    Fbs { h1: f64, h2: f64 },
    /// Compensated Poisson integral `I_+` or `I_-`.
    IntermediatePoisson { plus: bool },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FieldRegime {
    pub family: FieldFamily,
    pub h: f64,
    pub log_correction: bool,
    pub limit: FieldLimit,
    pub gamma: f64,
    pub alpha: f64,
    pub p: f64,
}

fn field_case<T: RegimeScalar>(gamma: T, alpha: T, p: T) -> (FieldFamily, T) {
    use FieldFamily::*;
    let one = T::int(1);
    let two = T::int(2);
    let gp = alpha / p - one;
    let gm = (one - p) / (alpha - (one - p));
    match gamma.compare(gp) {
        Ordering::Equal => return (IntermediatePlus, one / p),
        Ordering::Greater => {
            let ap = (alpha - p) / (one - p);
            return match alpha.compare(two - p) {
                Ordering::Less => (StableSlidePlus, one + gamma / ap),
                Ordering::Equal => (FbsLogPlus, one + gamma / two),
                Ordering::Greater => {
                    let hp = (two - alpha + p) / (two * p);
                    (FbsPlus, hp + gamma / two)
                }
            };
        }
        Ordering::Less => {}
    }
    match gamma.compare(gm) {
        Ordering::Equal => (IntermediateMinus, gm / (one - p)),
        Ordering::Less => {
            let am = (alpha - one + p) / p;
            match alpha.compare(one + p) {
                Ordering::Less => (StableSlideMinus, gamma + one / am),
                Ordering::Equal => (FbsLogMinus, gamma + one / two),
                Ordering::Greater => {
                    let hm = (T::int(3) - p - alpha) / (two * (one - p));
                    (FbsMinus, gamma * hm + one / two)
                }
            }
        }
        Ordering::Greater => (StableSheet, (one + gamma) / alpha),
    }
}

fn build_field_regime(family: FieldFamily, h: f64, gamma: f64, alpha: f64, p: f64) -> FieldRegime {
    use FieldFamily::*;
    let limit = match family {
        StableSheet => FieldLimit::StableSheet { index: alpha },
        StableSlidePlus => FieldLimit::StableLine {
            index: (alpha - p) / (1.0 - p),
            along_y: true,
        },
        StableSlideMinus => FieldLimit::StableLine {
            index: (alpha - 1.0 + p) / p,
            along_y: false,
        },
        FbsPlus => FieldLimit::Fbs {
            h1: h_plus(alpha, p),
            h2: 0.5,
        },
        FbsMinus => FieldLimit::Fbs {
            h1: 0.5,
            h2: h_minus(alpha, p),
        },
        FbsLogPlus => FieldLimit::Fbs { h1: 1.0, h2: 0.5 },
        FbsLogMinus => FieldLimit::Fbs { h1: 0.5, h2: 1.0 },
        IntermediatePlus => FieldLimit::IntermediatePoisson { plus: true },
        IntermediateMinus => FieldLimit::IntermediatePoisson { plus: false },
    };
    FieldRegime {
        family,
        h,
        log_correction: matches!(family, FbsLogPlus | FbsLogMinus),
        limit,
        gamma,
        alpha,
        p,
    }
}

fn check_gamma(gamma: f64) -> Result<()> {
    if !(gamma > 0.0 && gamma.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "gamma must be positive and finite, got {gamma}"
        )));
    }
    Ok(())
}

pub fn classify_field_regime(gamma: f64, alpha: f64, p: f64) -> Result<FieldRegime> {
    check_alpha_p(alpha, p, false)?;
    check_gamma(gamma)?;
    let (family, h) = field_case(gamma, alpha, p);
    Ok(build_field_regime(family, h, gamma, alpha, p))
}

/// Like [`classify_field_regime`] but boundary ties are decided exactly.
pub fn classify_field_regime_exact(gamma: Rational, alpha: Rational, p: Rational) -> Result<FieldRegime> {
    let (g, a, pf) = (gamma.to_f64(), alpha.to_f64(), p.to_f64());
    let one = Rational::int(1);
    let two = Rational::int(2);
    if !(alpha > one && alpha < two) {
        return Err(Error::AlphaOutOfRange(a));
    }
    if !(p > Rational::int(0) && p < one) {
        return Err(Error::POutOfRange {
            value: pf,
            range: "(0,1)",
        });
    }
    if gamma <= Rational::int(0) {
        return Err(Error::InvalidArgument(format!("gamma must be positive, got {gamma}")));
    }
    let (family, h) = field_case(gamma, alpha, p);
    Ok(build_field_regime(family, h.to_f64(), g, a, pf))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum WorkloadFamily {
    AlphaStableLevy,
    AlphaOverPStableLevy,
    BrownianMotion,
    BrownianMotionLog,
    IntermediateLevyHat,
    FbmSlow,
    GaussianLine,
    StableLinePlus,
    FbmPlus,
    BrownianMotionLogFast,
    IntermediateGaussHat,
    GaussianLineHatZ,
    GaussianLineLog,
    IntermediateI,
    IntermediateIHat,
    IntermediateIPlus,
}

impl fmt::Display for WorkloadFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

/// Connection-rate regime: `gamma` below, above or at `gamma_+`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RateRegime {
    Slow,
    Fast,
    Intermediate,
}

/// Applicable workload constants; entries outside the regime are `None`.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct WorkloadConstants {
    pub sigma_alpha: Option<f64>,
    pub sigma_alpha_over_p: Option<f64>,
    pub sigma1_sq: Option<f64>,
    pub sigma1_hat_sq: Option<f64>,
    pub sigma2_sq: Option<f64>,
    pub sigma3_sq: Option<f64>,
    pub sigma2_hat_sq: Option<f64>,
    pub sigma_alpha_plus: Option<f64>,
    pub sigma_plus_sq: Option<f64>,
    pub sigma_tilde_plus_sq: Option<f64>,
}

impl WorkloadConstants {
    /// `(name, value)` pairs of the populated entries.
    pub fn entries(&self) -> Vec<(&'static str, f64)> {
        let all = [
            ("sigma_alpha", self.sigma_alpha),
            ("sigma_alpha_over_p", self.sigma_alpha_over_p),
            ("sigma1_sq", self.sigma1_sq),
            ("sigma1_hat_sq", self.sigma1_hat_sq),
            ("sigma2_sq", self.sigma2_sq),
            ("sigma3_sq", self.sigma3_sq),
            ("sigma2_hat_sq", self.sigma2_hat_sq),
            ("sigma_alpha_plus", self.sigma_alpha_plus),
            ("sigma_plus_sq", self.sigma_plus_sq),
            ("sigma_tilde_plus_sq", self.sigma_tilde_plus_sq),
        ];
        all.iter().filter_map(|&(n, v)| v.map(|v| (n, v))).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WorkloadRegime {
    pub family: WorkloadFamily,
    pub rate: RateRegime,
    pub script_h: f64,
    pub log_correction: bool,
    /// Stability index of a stable limit.
    pub index: Option<f64>,
    /// Hurst index of a Gaussian limit (`1` for random lines).
    pub hurst: Option<f64>,
    pub constants: WorkloadConstants,
    pub gamma: f64,
    pub beta: f64,
    pub alpha: f64,
    pub p: f64,
}

fn workload_case<T: RegimeScalar>(gamma: T, beta: Option<T>, alpha: T, p: T) -> (WorkloadFamily, RateRegime, T) {
    use WorkloadFamily::*;
    let one = T::int(1);
    let two = T::int(2);
    let half = one / two;
    let p_is_one = p.compare(one) == Ordering::Equal;
    let gp = alpha / p - one;
    // alpha_+ beta; None encodes +inf.
    let a_beta = match (beta, p_is_one) {
        (Some(b), false) => Some((alpha - p) / (one - p) * b),
        _ => None,
    };
    let cmp_opt = |v: Option<T>, rhs: T| v.map_or(Ordering::Greater, |v| v.compare(rhs));
    // Gaussian cases below the threshold all need finite beta.
    let b = beta.unwrap_or(T::int(0));
    let bm_h = |g: T| half * (one + g + b * (two - alpha) / (one - p));
    match gamma.compare(gp) {
        Ordering::Less => {
            let lhs = beta.map(|b| alpha * b);
            match cmp_opt(lhs, (one + gamma) * (one - p)) {
                Ordering::Greater => (AlphaStableLevy, RateRegime::Slow, (one + gamma) / alpha),
                Ordering::Equal => (IntermediateLevyHat, RateRegime::Slow, (one + gamma) / alpha),
                Ordering::Less => match alpha.compare(two * p) {
                    Ordering::Less => (AlphaOverPStableLevy, RateRegime::Slow, b + (one + gamma) * p / alpha),
                    Ordering::Equal => (BrownianMotionLog, RateRegime::Slow, b + (one + gamma) / two),
                    Ordering::Greater => (BrownianMotion, RateRegime::Slow, bm_h(gamma)),
                },
            }
        }
        Ordering::Greater => match cmp_opt(a_beta, gp) {
            Ordering::Less => match alpha.compare(two * p) {
                Ordering::Less => {
                    let h = (T::int(3) - alpha / p) / two;
                    (FbmSlow, RateRegime::Fast, h + b + gamma / two)
                }
                Ordering::Equal => (BrownianMotionLogFast, RateRegime::Fast, b + (one + gamma) / two),
                Ordering::Greater => (BrownianMotion, RateRegime::Fast, bm_h(gamma)),
            },
            Ordering::Equal => (
                IntermediateGaussHat,
                RateRegime::Fast,
                half * (one + gamma + (two - alpha) / p),
            ),
            Ordering::Greater => match alpha.compare(two - p) {
                Ordering::Less => match cmp_opt(a_beta, gamma) {
                    Ordering::Less => (
                        GaussianLine,
                        RateRegime::Fast,
                        one + half * (gamma + b * (two - alpha - p) / (one - p)),
                    ),
                    Ordering::Equal => (GaussianLineHatZ, RateRegime::Fast, one + b),
                    Ordering::Greater => {
                        let ap = (alpha - p) / (one - p);
                        (StableLinePlus, RateRegime::Fast, one + gamma / ap)
                    }
                },
                Ordering::Equal => (GaussianLineLog, RateRegime::Fast, one + gamma / two),
                Ordering::Greater => {
                    let hp = (two - alpha + p) / (two * p);
                    (FbmPlus, RateRegime::Fast, hp + gamma / two)
                }
            },
        },
        Ordering::Equal => match cmp_opt(a_beta, gp) {
            Ordering::Less => match alpha.compare(two * p) {
                Ordering::Less => (IntermediateI, RateRegime::Intermediate, one + b),
                Ordering::Equal => (BrownianMotionLog, RateRegime::Intermediate, b + (one + gamma) / two),
                Ordering::Greater => (BrownianMotion, RateRegime::Intermediate, bm_h(gamma)),
            },
            Ordering::Equal => (IntermediateIHat, RateRegime::Intermediate, one / p),
            Ordering::Greater => (IntermediateIPlus, RateRegime::Intermediate, one / p),
        },
    }
}

fn build_workload_regime(
    family: WorkloadFamily,
    rate: RateRegime,
    script_h: f64,
    gamma: f64,
    beta: f64,
    alpha: f64,
    p: f64,
) -> WorkloadRegime {
    use WorkloadFamily::*;
    let (index, hurst) = match family {
        AlphaStableLevy => (Some(alpha), None),
        AlphaOverPStableLevy => (Some(alpha / p), None),
        StableLinePlus => (Some((alpha - p) / (1.0 - p)), None),
        BrownianMotion | BrownianMotionLog | BrownianMotionLogFast => (None, Some(0.5)),
        FbmSlow => (None, Some((3.0 - alpha / p) / 2.0)),
        FbmPlus => (None, Some(h_plus(alpha, p))),
        GaussianLine | GaussianLineLog => (None, Some(1.0)),
        _ => (None, None),
    };
    WorkloadRegime {
        family,
        rate,
        script_h,
        log_correction: matches!(family, BrownianMotionLog | BrownianMotionLogFast | GaussianLineLog),
        index,
        hurst,
        constants: WorkloadConstants::default(),
        gamma,
        beta,
        alpha,
        p,
    }
}

fn check_beta(beta: f64) -> Result<()> {
    if !(beta > 0.0) || beta.is_nan() {
        return Err(Error::InvalidArgument(format!(
            "beta must be positive or +inf, got {beta}"
        )));
    }
    Ok(())
}

/// Classifies the workload limit. `beta = f64::INFINITY` means no rate cap.
/// The returned constants are empty; see
/// [`super::constants::workload_constants`].
pub fn classify_workload_regime(gamma: f64, beta: f64, alpha: f64, p: f64) -> Result<WorkloadRegime> {
    check_alpha_p(alpha, p, true)?;
    check_gamma(gamma)?;
    check_beta(beta)?;
    let b = if beta.is_infinite() { None } else { Some(beta) };
    let (family, rate, h) = workload_case(gamma, b, alpha, p);
    Ok(build_workload_regime(family, rate, h, gamma, beta, alpha, p))
}

/// Exact-tie variant; `beta = None` means `+inf`.
pub fn classify_workload_regime_exact(
    gamma: Rational,
    beta: Option<Rational>,
    alpha: Rational,
    p: Rational,
) -> Result<WorkloadRegime> {
    let zero = Rational::int(0);
    let one = Rational::int(1);
    if !(alpha > one && alpha < Rational::int(2)) {
        return Err(Error::AlphaOutOfRange(alpha.to_f64()));
    }
    if !(p > zero && p <= one) {
        return Err(Error::POutOfRange {
            value: p.to_f64(),
            range: "(0,1]",
        });
    }
    if gamma <= zero {
        return Err(Error::InvalidArgument(format!("gamma must be positive, got {gamma}")));
    }
    if let Some(b) = beta {
        if b <= zero {
            return Err(Error::InvalidArgument(format!("beta must be positive, got {b}")));
        }
    }
    let (family, rate, h) = workload_case(gamma, beta, alpha, p);
    Ok(build_workload_regime(
        family,
        rate,
        h.to_f64(),
        gamma.to_f64(),
        beta.map_or(f64::INFINITY, |b| b.to_f64()),
        alpha.to_f64(),
        p.to_f64(),
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn q(n: i128, d: i128) -> Rational {
        Ratio::new(n, d)
    }

    #[test]
    fn field_reference_points() {
        let r = classify_field_regime(1.0, 1.5, 0.5).unwrap();
        assert_eq!(r.family, FieldFamily::StableSheet);
        assert!((r.h - 4.0 / 3.0).abs() < 1e-15);

        let r = classify_field_regime(3.0, 1.9, 0.5).unwrap();
        assert_eq!(r.family, FieldFamily::FbsPlus);
        assert!((r.h - 2.1).abs() < 1e-12);
        match r.limit {
            FieldLimit::Fbs { h1, h2 } => {
                assert!((h1 - 0.6).abs() < 1e-12);
                assert_eq!(h2, 0.5);
            }
            other => panic!("{other:?}"),
        }

        let r = classify_field_regime(2.0, 1.5, 0.5).unwrap();
        assert_eq!(r.family, FieldFamily::IntermediatePlus);
        assert_eq!(r.h, 2.0);
    }

    #[test]
    fn field_boundaries_exact() {
        // gamma_- = 0.5 at (1.5, 0.5); alpha = 1 + p and alpha = 2 - p both hold.
        let r = classify_field_regime_exact(q(1, 2), q(3, 2), q(1, 2)).unwrap();
        assert_eq!(r.family, FieldFamily::IntermediateMinus);
        assert!((r.h - 1.0).abs() < 1e-15);
        let r = classify_field_regime_exact(q(1, 3), q(3, 2), q(1, 2)).unwrap();
        assert_eq!(r.family, FieldFamily::FbsLogMinus);
        let r = classify_field_regime_exact(q(3, 1), q(3, 2), q(1, 2)).unwrap();
        assert_eq!(r.family, FieldFamily::FbsLogPlus);
        assert!(r.log_correction);
    }

    #[test]
    fn reflection_mirrors_family() {
        let r = classify_field_regime(0.4, 1.3, 0.5).unwrap();
        let m = classify_field_regime(2.5, 1.3, 0.5).unwrap();
        assert_eq!(r.family, FieldFamily::StableSlideMinus);
        assert_eq!(m.family, FieldFamily::StableSlidePlus);
        assert_eq!(r.family.mirror(), m.family);
    }

    #[test]
    fn field_rejects_p_one() {
        assert!(matches!(
            classify_field_regime(1.0, 1.5, 1.0),
            Err(Error::POutOfRange { .. })
        ));
    }

    #[test]
    fn workload_reference_points() {
        let r = classify_workload_regime(1.0, f64::INFINITY, 1.5, 0.5).unwrap();
        assert_eq!(r.family, WorkloadFamily::AlphaStableLevy);
        assert!((r.script_h - 4.0 / 3.0).abs() < 1e-15);

        let r = classify_workload_regime(0.3, 0.05, 1.2, 0.8).unwrap();
        assert_eq!(r.family, WorkloadFamily::AlphaOverPStableLevy);
        assert!((r.index.unwrap() - 1.5).abs() < 1e-15);
        assert!((r.script_h - (0.05 + 1.3 * 0.8 / 1.2)).abs() < 1e-14);

        let r = classify_workload_regime(3.0, f64::INFINITY, 1.8, 0.5).unwrap();
        assert_eq!(r.family, WorkloadFamily::FbmPlus);
        assert!((r.hurst.unwrap() - 0.7).abs() < 1e-14);
    }

    #[test]
    fn workload_p_one_dichotomy() {
        let slow = classify_workload_regime(0.2, 0.7, 1.5, 1.0).unwrap();
        assert_eq!(slow.family, WorkloadFamily::AlphaStableLevy);
        let fast = classify_workload_regime(0.9, 0.7, 1.5, 1.0).unwrap();
        assert_eq!(fast.family, WorkloadFamily::FbmPlus);
    }

    #[test]
    fn workload_exact_boundaries() {
        // alpha beta = (1 + gamma)(1 - p) = 1
        let r = classify_workload_regime_exact(q(1, 1), Some(q(2, 3)), q(3, 2), q(1, 2)).unwrap();
        assert_eq!(r.family, WorkloadFamily::IntermediateLevyHat);
        // alpha_+ beta = gamma_+ = 2 with alpha_+ = 2 at gamma = 3.
        let r = classify_workload_regime_exact(q(3, 1), Some(q(1, 1)), q(3, 2), q(1, 2)).unwrap();
        assert_eq!(r.family, WorkloadFamily::IntermediateGaussHat);
        // alpha_+ beta = gamma with alpha < 2 - p.
        let r = classify_workload_regime_exact(q(3, 1), Some(q(15, 8)), q(13, 10), q(1, 2)).unwrap();
        assert_eq!(r.family, WorkloadFamily::GaussianLineHatZ);
    }
}
