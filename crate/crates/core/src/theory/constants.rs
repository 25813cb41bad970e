//! Scale constants of the limit laws.

use std::cmp::Ordering;
use std::f64::consts::PI;

use statrs::function::gamma::gamma;

use super::exponents::critical_exponents;
use super::params::ModelParams;
use super::regime::{classify_workload_regime, RegimeScalar, WorkloadConstants, WorkloadFamily};
use crate::error::{Error, Result};
use crate::geometry::GrainShape;
use crate::quad::{integrate_points, integrate_power_law, Tolerance, DEFAULT_ABS_TOL};

/// `Gamma(2 - a) cos(pi a / 2) / (a (1 - a))`, positive for `1 < a < 2`.
pub(crate) fn stable_factor(a: f64) -> f64 {
    gamma(2.0 - a) * (PI * a / 2.0).cos() / (a * (1.0 - a))
}

fn mismatch(what: &str, cond: &str, params: &ModelParams) -> Error {
    Error::RegimeMismatch(format!(
        "{what} requires {cond}; got alpha={}, p={}",
        params.alpha, params.p
    ))
}

/// `sigma^alpha = c_f leb(B)^alpha Gamma(2 - alpha) cos(pi alpha / 2) / (alpha (1 - alpha))`.
pub fn sigma_alpha(params: &ModelParams) -> f64 {
    params.c_f() * params.grain.area().powf(params.alpha) * stable_factor(params.alpha)
}

/// `int leb1(B(u))^q du`.
pub fn section_power_integral(grain: &GrainShape, q: f64) -> Result<f64> {
    if let GrainShape::UnitSquare = grain {
        return Ok(1.0);
    }
    let mut f = |u: f64| grain.section_length(u).powf(q);
    Ok(integrate_points(&mut f, &grain.section_breaks(), Tolerance::abs(DEFAULT_ABS_TOL))?.value)
}

/// `sigma^{alpha_+}`, defined for `1 < alpha < 2 - p`.
pub fn sigma_alpha_plus(params: &ModelParams) -> Result<f64> {
    let (a, p) = (params.alpha, params.p);
    if p >= 1.0 || a.compare(2.0 - p) != Ordering::Less {
        return Err(mismatch("sigma^{alpha_+}", "alpha < 2 - p", params));
    }
    let ap = (a - p) / (1.0 - p);
    let sec = section_power_integral(&params.grain, ap)?;
    Ok(params.c_f() * stable_factor(ap) / (1.0 - p) * sec)
}

/// `sigma^{alpha_-}` through the reflection `p -> 1 - p`, `B -> B*`.
pub fn sigma_alpha_minus(params: &ModelParams) -> Result<f64> {
    sigma_alpha_plus(&params.reflected()?).map_err(|_| mismatch("sigma^{alpha_-}", "alpha < 1 + p", params))
}

/// `sigma_+^2` for `2 - p < alpha < 2`.
pub fn sigma_plus_sq(params: &ModelParams) -> Result<f64> {
    let (a, p) = (params.alpha, params.p);
    // p = 1 is admitted from the workload side, where 2 - p < alpha always holds.
    if p < 1.0 && a.compare(2.0 - p) != Ordering::Greater {
        return Err(mismatch("sigma_+^2", "alpha > 2 - p", params));
    }
    match params.grain {
        GrainShape::UnitSquare => {
            let head = 1.0 / (2.0 - a) - 1.0 / (3.0 * (2.0 - a + p));
            let tail = 1.0 / (a + p - 2.0) - 1.0 / (3.0 * (a + 2.0 * p - 2.0));
            Ok(params.c_f() * (head + tail))
        }
        _ => sigma_plus_sq_quadrature(params),
    }
}

/// Nested quadrature of `c_f int du int (int_0^1 leb1(B((t-u)/r^p)) dt)^2 r^{1-alpha-2p} dr`.
pub(crate) fn sigma_plus_sq_quadrature(params: &ModelParams) -> Result<f64> {
    let (a, p) = (params.alpha, params.p);
    let grain = &params.grain;
    let bb = grain.bounding_box();
    let inner_tol = Tolerance {
        abs: 1e-300,
        rel: 1e-11,
        max_intervals: 4000,
    };
    let mut failure = None;
    let mut outer = |r: f64| -> f64 {
        let rp = r.powf(p);
        let k = |u: f64| rp * (grain.section_cdf((1.0 - u) / rp) - grain.section_cdf(-u / rp));
        let mut pts = vec![-rp * bb.x1, -rp * bb.x0, 1.0 - rp * bb.x1, 1.0 - rp * bb.x0];
        pts.sort_by(f64::total_cmp);
        let mut sq = |u: f64| {
            let v = k(u);
            v * v
        };
        match integrate_points(&mut sq, &pts, inner_tol) {
            Ok(e) => e.value * r.powf(1.0 - a - 2.0 * p),
            Err(e) => {
                failure.get_or_insert(e);
                0.0
            }
        }
    };
    let est = integrate_power_law(
        &mut outer,
        1.0 - a,
        a + p - 2.0,
        1.0,
        &[],
        Tolerance::rel(1e-9).with_abs(DEFAULT_ABS_TOL),
    )?;
    if let Some(e) = failure {
        return Err(e);
    }
    Ok(params.c_f() * est.value)
}

/// `sigma_-^2` through reflection.
pub fn sigma_minus_sq(params: &ModelParams) -> Result<f64> {
    if params.alpha.compare(1.0 + params.p) != Ordering::Greater {
        return Err(mismatch("sigma_-^2", "alpha > 1 + p", params));
    }
    sigma_plus_sq(&params.reflected()?)
}

/// `int leb(B ∩ (B + (0, u))) du`, by quadrature of the translate overlap.
pub fn vertical_autocorrelation_integral(grain: &GrainShape) -> Result<f64> {
    if let GrainShape::UnitSquare = grain {
        return Ok(1.0);
    }
    let h = grain.bounding_box().height();
    let mut f = |u: f64| grain.translate_overlap(0.0, u);
    Ok(integrate_points(&mut f, &[-h, 0.0, h], Tolerance::abs(DEFAULT_ABS_TOL))?.value)
}

/// `sigma~_+^2` for `gamma > gamma_+`, `alpha = 2 - p`.
pub fn sigma_tilde_plus_sq(gamma: f64, params: &ModelParams) -> Result<f64> {
    let (a, p) = (params.alpha, params.p);
    if p >= 1.0 || a.compare(2.0 - p) != Ordering::Equal {
        return Err(mismatch("sigma~_+^2", "alpha = 2 - p", params));
    }
    let gp = a / p - 1.0;
    if gamma.compare(gp) != Ordering::Greater {
        return Err(Error::RegimeMismatch(format!(
            "sigma~_+^2 requires gamma > gamma_+ = {gp}, got {gamma}"
        )));
    }
    let ac = vertical_autocorrelation_integral(&params.grain)?;
    Ok(params.c_f() * (gamma - gp) / (2.0 * (1.0 - p)) * ac)
}

/// `sigma~_-^2` for `gamma < gamma_-`, `alpha = 1 + p`, through reflection.
///
/// The reflected aggregate runs at scale `lambda^gamma`, so the logarithmic
/// normalization contributes the extra factor `gamma`.
pub fn sigma_tilde_minus_sq(gamma: f64, params: &ModelParams) -> Result<f64> {
    if params.alpha.compare(1.0 + params.p) != Ordering::Equal {
        return Err(mismatch("sigma~_-^2", "alpha = 1 + p", params));
    }
    Ok(gamma * sigma_tilde_plus_sq(1.0 / gamma, &params.reflected()?)?)
}

/// `sigma_1^2 = 2 c_f (1 - p) / ((2 - alpha)(alpha - 2p))`.
pub fn sigma1_sq(params: &ModelParams) -> Result<f64> {
    let (a, p) = (params.alpha, params.p);
    if !(p < 1.0 && a.compare(2.0 * p) == Ordering::Greater) {
        return Err(mismatch("sigma_1^2", "max(1, 2p) < alpha, p < 1", params));
    }
    Ok(2.0 * params.c_f() * (1.0 - p) / ((2.0 - a) * (a - 2.0 * p)))
}

/// `sigma^_1^2 = c_f ((1 + gamma)(1 - p) - 2 p beta) / (2 p (1 - p))`.
pub fn sigma1_hat_sq(gamma: f64, beta: f64, params: &ModelParams) -> Result<f64> {
    let p = params.p;
    let num = (1.0 + gamma) * (1.0 - p) - 2.0 * p * beta;
    if !(p < 1.0 && beta.is_finite() && num > 0.0) {
        return Err(Error::RegimeMismatch(format!(
            "sigma^_1^2 requires 2 p beta < (1 + gamma)(1 - p); got gamma={gamma}, beta={beta}, p={p}"
        )));
    }
    Ok(params.c_f() * num / (2.0 * p * (1.0 - p)))
}

/// `sigma_2^2 = 2 c_f / (alpha (2 - alpha/p)(3 - alpha/p)(alpha/p - 1))`.
pub fn sigma2_sq(params: &ModelParams) -> Result<f64> {
    let (a, p) = (params.alpha, params.p);
    if a.compare(2.0 * p) != Ordering::Less {
        return Err(mismatch("sigma_2^2", "alpha < 2p", params));
    }
    let q = a / p;
    Ok(2.0 * params.c_f() / (a * (2.0 - q) * (3.0 - q) * (q - 1.0)))
}

/// `sigma_3^2 = 2 c_f (1 - p) / ((2 - p - alpha)(alpha - p))`.
pub fn sigma3_sq(params: &ModelParams) -> Result<f64> {
    let (a, p) = (params.alpha, params.p);
    if !(p < 1.0 && a.compare(2.0 - p) == Ordering::Less) {
        return Err(mismatch("sigma_3^2", "alpha < 2 - p", params));
    }
    Ok(2.0 * params.c_f() * (1.0 - p) / ((2.0 - p - a) * (a - p)))
}

/// `sigma^_2^2 = c_f (1/p - beta/(1 - p))`.
pub fn sigma2_hat_sq(beta: f64, params: &ModelParams) -> Result<f64> {
    let p = params.p;
    let v = 1.0 / p - beta / (1.0 - p);
    if !(p < 1.0 && beta.is_finite() && v > 0.0) {
        return Err(Error::RegimeMismatch(format!(
            "sigma^_2^2 requires beta < (1 - p)/p; got beta={beta}, p={p}"
        )));
    }
    Ok(params.c_f() * v)
}

/// Scale `s` of the `(alpha/p)`-stable Levy process, `log chf = -x s |theta|^{alpha/p} (...)`.
pub fn sigma_alpha_over_p(params: &ModelParams) -> Result<f64> {
    let (a, p) = (params.alpha, params.p);
    if a.compare(2.0 * p) != Ordering::Less {
        return Err(mismatch("(alpha/p)-stable scale", "alpha < 2p", params));
    }
    Ok(params.c_f() / a * gamma(2.0 - a / p) * (PI * a / (2.0 * p)).cos() / (1.0 - a / p))
}

/// Constants applicable to the workload limit at `(gamma, beta)`.
pub fn workload_constants(gamma: f64, beta: f64, params: &ModelParams) -> Result<WorkloadConstants> {
    use WorkloadFamily::*;
    let regime = classify_workload_regime(gamma, beta, params.alpha, params.p)?;
    let mut c = WorkloadConstants::default();
    match regime.family {
        AlphaStableLevy => c.sigma_alpha = Some(sigma_alpha(params)),
        AlphaOverPStableLevy => c.sigma_alpha_over_p = Some(sigma_alpha_over_p(params)?),
        BrownianMotion => c.sigma1_sq = Some(sigma1_sq(params)?),
        BrownianMotionLog => c.sigma1_hat_sq = Some(sigma1_hat_sq(gamma, beta, params)?),
        FbmSlow => c.sigma2_sq = Some(sigma2_sq(params)?),
        GaussianLine => c.sigma3_sq = Some(sigma3_sq(params)?),
        BrownianMotionLogFast => c.sigma2_hat_sq = Some(sigma2_hat_sq(beta, params)?),
        StableLinePlus => c.sigma_alpha_plus = Some(sigma_alpha_plus(params)?),
        FbmPlus => c.sigma_plus_sq = Some(sigma_plus_sq(params)?),
        GaussianLineLog => c.sigma_tilde_plus_sq = Some(sigma_tilde_plus_sq(gamma, params)?),
        IntermediateLevyHat | IntermediateGaussHat | GaussianLineHatZ | IntermediateI | IntermediateIHat
        | IntermediateIPlus => {}
    }
    Ok(c)
}

/// `gamma_+` for the parameters; convenience for callers holding a `ModelParams`.
pub fn gamma_plus(params: &ModelParams) -> f64 {
    critical_exponents(params.alpha, params.p)
        .map(|e| e.gamma_plus)
        .unwrap_or(f64::NAN)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::theory::params::Usage;

    fn sq(a: f64, p: f64) -> ModelParams {
        ModelParams::square(a, p).unwrap()
    }

    #[test]
    fn sigma_alpha_reference() {
        let v = sigma_alpha(&sq(1.5, 0.5));
        // 1.5 * cos(3pi/4) * sqrt(pi) / (1.5 * -0.5) = sqrt(2 pi)
        assert!((v - (2.0 * PI).sqrt()).abs() < 1e-12, "{v}");
        assert!((v - 2.50663).abs() < 1e-5);
    }

    #[test]
    fn sigma_alpha_area_homogeneity() {
        let disk = ModelParams::validate(1.4, 0.3, 1.0, GrainShape::UnitDisk, Usage::Field).unwrap();
        let ratio = sigma_alpha(&disk) / sigma_alpha(&sq(1.4, 0.3));
        assert!((ratio - PI.powf(1.4)).abs() < 1e-12);
    }

    #[test]
    fn sigma_alpha_plus_square_and_disk() {
        let s = sigma_alpha_plus(&sq(1.3, 0.5)).unwrap();
        let ap: f64 = 1.6;
        let direct = 1.3 * gamma(2.0 - ap) * (PI * ap / 2.0).cos() / (0.5 * ap * (1.0 - ap));
        assert!((s - direct).abs() < 1e-12);
        let disk = ModelParams::validate(1.3, 0.5, 1.0, GrainShape::UnitDisk, Usage::Field).unwrap();
        let sec = section_power_integral(&GrainShape::UnitDisk, 1.6).unwrap();
        // int_{-1}^{1} (2 sqrt(1-u^2))^{1.6} du = 2^{1.6} B(1/2, 1.8)
        let oracle = 2f64.powf(1.6) * statrs::function::beta::beta(0.5, 1.8);
        assert!((sec - oracle).abs() < 1e-7, "{sec} vs {oracle}");
        assert!((sigma_alpha_plus(&disk).unwrap() - direct * oracle).abs() < 1e-6);
        assert!(matches!(sigma_alpha_plus(&sq(1.5, 0.5)), Err(Error::RegimeMismatch(_))));
    }

    #[test]
    fn sigma_plus_sq_closed_form_matches_quadrature() {
        let m = sq(1.9, 0.5);
        let closed = sigma_plus_sq(&m).unwrap();
        let quad = sigma_plus_sq_quadrature(&m).unwrap();
        assert!((closed - quad).abs() < 1e-6 * closed, "{closed} vs {quad}");
        assert!((closed - 21.990_740_740_740_74).abs() < 1e-9);
        assert!(matches!(sigma_plus_sq(&sq(1.4, 0.5)), Err(Error::RegimeMismatch(_))));
    }

    #[test]
    fn sigma_tilde_plus_reference() {
        let v = sigma_tilde_plus_sq(3.0, &sq(1.5, 0.5)).unwrap();
        assert!((v - 1.5).abs() < 1e-14);
        assert!(sigma_tilde_plus_sq(2.0 + 1e-9, &sq(1.5, 0.5)).unwrap() < 1e-8);
        let disk = vertical_autocorrelation_integral(&GrainShape::UnitDisk).unwrap();
        // equals int leb1(B(u))^2 du = int 4 (1 - u^2) du = 16/3
        assert!((disk - 16.0 / 3.0).abs() < 1e-7, "{disk}");
    }

    #[test]
    fn workload_constant_values() {
        let m = ModelParams::validate(1.8, 0.5, 1.0, GrainShape::UnitSquare, Usage::Workload).unwrap();
        assert!((sigma1_sq(&m).unwrap() - 11.25).abs() < 1e-12);
        let m = ModelParams::validate(1.5, 0.5, 1.0, GrainShape::UnitSquare, Usage::Workload).unwrap();
        assert!((sigma2_hat_sq(0.25, &m).unwrap() - 2.25).abs() < 1e-14);
        assert!(sigma3_sq(&m).is_err());
        let m = ModelParams::validate(1.3, 0.5, 1.0, GrainShape::UnitSquare, Usage::Workload).unwrap();
        assert!(sigma3_sq(&m).unwrap() > 0.0);
    }

    #[test]
    fn alpha_over_p_scale_is_positive() {
        let m = ModelParams::validate(1.2, 0.8, 1.0, GrainShape::UnitSquare, Usage::Workload).unwrap();
        assert!(sigma_alpha_over_p(&m).unwrap() > 0.0);
    }

    #[test]
    fn minus_constants_by_reflection() {
        // alpha = 1.3 < 1 + p for p = 0.5; reflected alpha_+ equals alpha_-.
        let m = sq(1.3, 0.5);
        assert!((sigma_alpha_minus(&m).unwrap() - sigma_alpha_plus(&m).unwrap()).abs() < 1e-14);
        let m = sq(1.9, 0.5);
        assert!((sigma_minus_sq(&m).unwrap() - sigma_plus_sq(&m).unwrap()).abs() < 1e-12);
        let m = sq(1.5, 0.5);
        // gamma = 1/3 reflects to 3; the log rescale brings in a factor 1/3.
        assert!((sigma_tilde_minus_sq(1.0 / 3.0, &m).unwrap() - 0.5).abs() < 1e-12);
    }
}
