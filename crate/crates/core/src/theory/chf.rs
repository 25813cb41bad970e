//! Log-characteristic functions of the limit marginals.
//!
//! Stable and Gaussian families are closed form. The intermediate families
//! are Poisson integrals `int Psi(theta k) dmu` with `Psi(z) = e^{iz} - 1 - iz`,
//! evaluated by adaptive quadrature with an absolute error budget of
//! [`CHF_ABS_TOL`] per theta.

use std::f64::consts::PI;

use num_complex::Complex64;

use super::constants::{
    sigma1_hat_sq, sigma1_sq, sigma2_hat_sq, sigma2_sq, sigma3_sq, sigma_alpha, sigma_alpha_minus, sigma_alpha_over_p,
    sigma_alpha_plus, sigma_minus_sq, sigma_plus_sq, sigma_tilde_minus_sq, sigma_tilde_plus_sq, stable_factor,
};
use super::params::ModelParams;
use super::regime::{FieldFamily, FieldRegime, WorkloadFamily, WorkloadRegime};
use crate::error::{Error, Result};
use crate::geometry::{overlap_square_integral, GrainShape};
use crate::quad::{integrate_head, integrate_points, integrate_power_law, integrate_to_infinity, Tolerance};
use crate::stats::ChfCurve;

/// Absolute error budget per theta for quadrature-based log-chf values.
pub const CHF_ABS_TOL: f64 = 1e-6;

const I: Complex64 = Complex64 { re: 0.0, im: 1.0 };

/// `Psi(z) = e^{iz} - 1 - iz`, with a series near zero.
pub fn psi(z: f64) -> Complex64 {
    if z.abs() < 1e-2 {
        let z2 = z * z;
        let re = z2 * (-1.0 / 2.0 + z2 * (1.0 / 24.0 - z2 / 720.0));
        let im = z * z2 * (-1.0 / 6.0 + z2 * (1.0 / 120.0 - z2 / 5040.0));
        Complex64::new(re, im)
    } else {
        Complex64::new(z.cos() - 1.0, z.sin() - z)
    }
}

/// `int_0^m Psi(c s) ds`.
fn psi_primitive(c: f64, m: f64) -> Complex64 {
    let z = c * m;
    if z.abs() < 0.1 {
        // m * sum_{k>=2} (iz)^k / (k+1)!
        let iz = I * z;
        let mut term = iz * iz / 2.0;
        let mut sum = Complex64::new(0.0, 0.0);
        for k in 2..14 {
            let t = term / (k as f64 + 1.0);
            sum += t;
            term = term * iz / (k as f64 + 1.0);
        }
        return sum * m;
    }
    ((I * z).exp() - 1.0) / (I * c) - m - I * z * m / 2.0
}

/// `int Psi(c * leb1((u, u + a] ∩ (0, x])) du`: the overlap is a trapezoid
/// in `u` with unit slopes and plateau `min(a, x)`.
pub fn psi_trapezoid(c: f64, a: f64, x: f64) -> Complex64 {
    let m = a.min(x);
    psi_primitive(c, m) * 2.0 + psi(c * m) * (a - x).abs()
}

/// `log E exp(i theta Z)` for the totally skewed stable law with
/// `log chf = -s |theta|^a (1 - i sgn(theta) tan(pi a / 2))`.
pub fn stable_log_chf(a: f64, s: f64, theta: f64) -> Complex64 {
    if theta == 0.0 {
        return Complex64::new(0.0, 0.0);
    }
    let m = s * theta.abs().powf(a);
    Complex64::new(-m, m * theta.signum() * (PI * a / 2.0).tan())
}

/// `int_0^inf Psi(theta s) s^{-1-a} ds` in closed form, `1 < a < 2`.
pub fn levy_power_integral(a: f64, theta: f64) -> Complex64 {
    stable_log_chf(a, stable_factor(a), theta)
}

fn gaussian(theta: f64, v: f64) -> Complex64 {
    Complex64::new(-0.5 * theta * theta * v, 0.0)
}

fn tol() -> Tolerance {
    Tolerance::abs(CHF_ABS_TOL)
}

fn check_match(alpha: f64, p: f64, params: &ModelParams) -> Result<()> {
    if alpha != params.alpha || p != params.p {
        return Err(Error::RegimeMismatch(format!(
            "regime classified for (alpha={alpha}, p={p}) but parameters have (alpha={}, p={})",
            params.alpha, params.p
        )));
    }
    Ok(())
}

/// `int_{phi0}^inf e^{i phi} g(phi) d phi` for `g` analytic in the right
/// half-plane and decaying at infinity, by rotating onto `phi0 + i t`.
fn oscillatory_tail<G>(phi0: f64, g: G, tol: Tolerance) -> Result<Complex64>
where
    G: Fn(Complex64) -> Complex64,
{
    let f = |t: f64| {
        let v = g(Complex64::new(phi0, t)) * (-t).exp();
        if v.is_finite() {
            v
        } else {
            Complex64::new(0.0, 0.0)
        }
    };
    let v = integrate_to_infinity(f, 0.0, &[1.0, 8.0, 32.0], tol)?.value;
    Ok(v * I * (I * phi0).exp())
}

/// Evaluates at `|theta|` and conjugates for negative theta; every kernel
/// here is real, so `log chf(-theta)` is the conjugate of `log chf(theta)`.
fn with_positive_theta<F>(theta: f64, f: F) -> Result<Complex64>
where
    F: FnOnce(f64) -> Result<Complex64>,
{
    if theta == 0.0 {
        return Ok(Complex64::new(0.0, 0.0));
    }
    let v = f(theta.abs())?;
    Ok(if theta < 0.0 { v.conj() } else { v })
}

/// `int_R^inf T(theta r^{1-p}, r^p, x) r^{-1-alpha} dr` for `R^p >= x`.
///
/// There `T = e^{icx} (2 / (ic) + a - x) - 2 / (ic) - x - a - i c x a` with
/// `c = theta r^{1-p}`, `a = r^p`; the last four terms integrate in closed
/// form and the oscillating one by contour rotation in the phase
/// `phi = theta x r^{1-p}`.
fn square_plus_tail(theta: f64, x: f64, big_r: f64, a: f64, p: f64, tol: Tolerance) -> Result<Complex64> {
    let smooth = I * (2.0 / theta) * big_r.powf(p - 1.0 - a) / (a + 1.0 - p)
        - x * big_r.powf(-a) / a
        - big_r.powf(p - a) / (a - p)
        - I * (theta * x) * big_r.powf(1.0 - a) / (a - 1.0);
    let q = 1.0 / (1.0 - p);
    let tx = theta * x;
    let g = |phi: Complex64| {
        let r = (phi / tx).powf(q);
        (2.0 * x / (I * phi) + r.powf(p) - x) * r.powf(-a) * q / phi
    };
    let osc = oscillatory_tail(tx * big_r.powf(1.0 - p), g, tol)?;
    Ok(smooth + osc)
}

/// `log E exp(i theta I_+(x, y))`.
pub fn intermediate_plus_log_chf(params: &ModelParams, theta: f64, x: f64, y: f64) -> Result<Complex64> {
    let (a, p, cf) = (params.alpha, params.p, params.c_f());
    let budget = CHF_ABS_TOL / (cf * y);
    with_positive_theta(theta, |theta| {
        let value = match &params.grain {
            GrainShape::UnitSquare => {
                let big_r = x.powf(1.0 / p);
                let mut f = |r: f64| psi_trapezoid(theta * r.powf(1.0 - p), r.powf(p), x) * r.powf(-1.0 - a);
                let head = integrate_head(&mut f, 1.0 - a, big_r, &[], Tolerance::abs(budget / 2.0))?.value;
                head + square_plus_tail(theta, x, big_r, a, p, Tolerance::abs(budget / 2.0))?
            }
            grain => general_plus_integral(grain, theta, x, a, p, cf * y)?,
        };
        Ok(value * (cf * y))
    })
}

/// 2-D quadrature for a general grain. The linear part of `Psi` integrates
/// exactly to `-i theta x leb(B) r`; the rest is truncated at the radius
/// beyond which it is bounded by half the budget.
fn general_plus_integral(grain: &GrainShape, theta: f64, x: f64, a: f64, p: f64, scale: f64) -> Result<Complex64> {
    let bb = grain.bounding_box();
    let w = bb.width();
    let budget = CHF_ABS_TOL / scale;
    // |e^{iz} - 1| <= 2 on the support of K, of length at most x + r^p w.
    let bound = |r: f64| 2.0 * (x * r.powf(-a) / a + w * r.powf(p - a) / (a - p));
    let mut big_r = x.powf(1.0 / p).max(1.0);
    while bound(big_r) > budget / 2.0 {
        big_r *= 2.0;
        if big_r > 1e12 {
            return Err(Error::QuadratureFailure {
                context: "truncation radius of the general-grain Poisson integral".into(),
                tolerance: budget,
                estimate: bound(big_r),
            });
        }
    }
    let inner = Tolerance::abs(budget * 1e-3 / big_r);
    let mut failure = None;
    let mut f = |r: f64| {
        let rp = r.powf(p);
        let scale = theta * r.powf(1.0 - p) * rp;
        let mut g = |u: f64| {
            let z = scale * (grain.section_cdf((x - u) / rp) - grain.section_cdf(-u / rp));
            Complex64::new(z.cos() - 1.0, z.sin())
        };
        let mut pts = vec![-rp * bb.x1, -rp * bb.x0, x - rp * bb.x1, x - rp * bb.x0];
        pts.sort_by(f64::total_cmp);
        match integrate_points(&mut g, &pts, inner) {
            Ok(e) => (e.value - I * (theta * x * grain.area() * r)) * r.powf(-1.0 - a),
            Err(e) => {
                failure.get_or_insert(e);
                Complex64::new(0.0, 0.0)
            }
        }
    };
    let v = integrate_head(&mut f, 1.0 - a, big_r, &[x.powf(1.0 / p)], Tolerance::abs(budget / 2.0))?.value;
    if let Some(e) = failure {
        return Err(e);
    }
    // Linear part beyond the truncation radius.
    Ok(v - I * (theta * x * grain.area()) * big_r.powf(1.0 - a) / (a - 1.0))
}

/// Log-chf of the field limit at `(x, y)` over `thetas`.
pub fn field_log_chf(regime: &FieldRegime, params: &ModelParams, thetas: &[f64], x: f64, y: f64) -> Result<ChfCurve> {
    use FieldFamily::*;
    check_match(regime.alpha, regime.p, params)?;
    let (a, p, g) = (params.alpha, params.p, regime.gamma);
    let values: Vec<Complex64> = match regime.family {
        StableSheet => {
            let s = sigma_alpha(params) * x * y;
            thetas.iter().map(|&t| stable_log_chf(a, s, t)).collect()
        }
        StableSlidePlus => {
            let ap = (a - p) / (1.0 - p);
            let s = sigma_alpha_plus(params)? * y * x.powf(ap);
            thetas.iter().map(|&t| stable_log_chf(ap, s, t)).collect()
        }
        StableSlideMinus => {
            let am = (a - 1.0 + p) / p;
            let s = sigma_alpha_minus(params)? * x * y.powf(am);
            thetas.iter().map(|&t| stable_log_chf(am, s, t)).collect()
        }
        FbsPlus => {
            let h = super::exponents::h_plus(a, p);
            let v = sigma_plus_sq(params)? * x.powf(2.0 * h) * y;
            thetas.iter().map(|&t| gaussian(t, v)).collect()
        }
        FbsMinus => {
            let h = super::exponents::h_minus(a, p);
            let v = sigma_minus_sq(params)? * x * y.powf(2.0 * h);
            thetas.iter().map(|&t| gaussian(t, v)).collect()
        }
        FbsLogPlus => {
            let v = sigma_tilde_plus_sq(g, params)? * x * x * y;
            thetas.iter().map(|&t| gaussian(t, v)).collect()
        }
        FbsLogMinus => {
            let v = sigma_tilde_minus_sq(g, params)? * x * y * y;
            thetas.iter().map(|&t| gaussian(t, v)).collect()
        }
        IntermediatePlus => thetas
            .iter()
            .map(|&t| intermediate_plus_log_chf(params, t, x, y))
            .collect::<Result<_>>()?,
        IntermediateMinus => {
            let refl = params.reflected()?;
            thetas
                .iter()
                .map(|&t| intermediate_plus_log_chf(&refl, t, y, x))
                .collect::<Result<_>>()?
        }
    };
    Ok(ChfCurve::theoretical_log(thetas.to_vec(), values))
}

/// Variance of `Z^(x)` (equal to that of `I^(x)`):
/// `c_f int (r^{1-p} ∧ 1)^2 G(r^p, x) r^{-1-alpha} dr`.
pub fn hat_process_variance(params: &ModelParams, x: f64) -> Result<f64> {
    let (a, p, cf) = (params.alpha, params.p, params.c_f());
    let f = |r: f64| {
        let w = r.powf(1.0 - p).min(1.0);
        w * w * overlap_square_integral(r.powf(p), x) * r.powf(-1.0 - a)
    };
    let breaks = [x.powf(1.0 / p)];
    Ok(cf * integrate_power_law(f, 1.0 - a, a - p, 1.0, &breaks, Tolerance::abs(1e-10))?.value)
}

/// `int_R^inf T(theta, r^p, x) r^{-1-alpha} dr` for `R^p >= x`, where
/// `T = 2 int_0^x Psi(theta s) ds + (r^p - x) Psi(theta x)`.
fn constant_rate_tail(theta: f64, x: f64, big_r: f64, a: f64, p: f64) -> Complex64 {
    psi_primitive(theta, x) * (2.0 * big_r.powf(-a) / a)
        + psi(theta * x) * (big_r.powf(p - a) / (a - p) - x * big_r.powf(-a) / a)
}

/// `int_0^inf Psi(theta (r^{1-p} ∧ 1) r^p) r^{-1-alpha} dr` for `theta > 0`.
///
/// Below `r = 1` the argument is `theta r`; above, `s = r^p` turns the
/// integral into `(1/p) int_1^inf Psi(theta s) s^{-1-alpha/p} ds`.
fn levy_hat_integral(theta: f64, a: f64, p: f64) -> Result<Complex64> {
    let mut f = |r: f64| psi(theta * r) * r.powf(-1.0 - a);
    let head = integrate_head(&mut f, 1.0 - a, 1.0, &[], Tolerance::abs(CHF_ABS_TOL / 4.0))?.value;
    let b = a / p;
    let smooth = Complex64::new(-1.0 / b, -theta / (b - 1.0));
    let g = |phi: Complex64| (phi / theta).powf(-1.0 - b) / theta;
    let osc = oscillatory_tail(theta, g, Tolerance::abs(CHF_ABS_TOL / 4.0))?;
    Ok(head + (smooth + osc) / p)
}

/// Log-chf of the workload limit at `x` over `thetas`.
pub fn workload_log_chf(regime: &WorkloadRegime, params: &ModelParams, thetas: &[f64], x: f64) -> Result<ChfCurve> {
    use WorkloadFamily::*;
    check_match(regime.alpha, regime.p, params)?;
    let (a, p, cf) = (params.alpha, params.p, params.c_f());
    let (g, b) = (regime.gamma, regime.beta);
    let gauss = |v: f64| thetas.iter().map(|&t| gaussian(t, v)).collect::<Vec<_>>();
    let values: Vec<Complex64> = match regime.family {
        AlphaStableLevy => {
            let s = sigma_alpha(params) * x;
            thetas.iter().map(|&t| stable_log_chf(a, s, t)).collect()
        }
        AlphaOverPStableLevy => {
            let s = sigma_alpha_over_p(params)? * x;
            thetas.iter().map(|&t| stable_log_chf(a / p, s, t)).collect()
        }
        BrownianMotion => gauss(sigma1_sq(params)? * x),
        BrownianMotionLog => gauss(sigma1_hat_sq(g, b, params)? * x),
        BrownianMotionLogFast => gauss(sigma2_hat_sq(b, params)? * x),
        FbmSlow => {
            let h = (3.0 - a / p) / 2.0;
            gauss(sigma2_sq(params)? * x.powf(2.0 * h))
        }
        GaussianLine => gauss(sigma3_sq(params)? * x * x),
        GaussianLineLog => gauss(sigma_tilde_plus_sq(g, params)? * x * x),
        FbmPlus => {
            let h = super::exponents::h_plus(a, p);
            gauss(sigma_plus_sq(params)? * x.powf(2.0 * h))
        }
        StableLinePlus => {
            let ap = (a - p) / (1.0 - p);
            let s = sigma_alpha_plus(params)? * x.powf(ap);
            thetas.iter().map(|&t| stable_log_chf(ap, s, t)).collect()
        }
        IntermediateGaussHat => gauss(hat_process_variance(params, x)?),
        IntermediateLevyHat => thetas
            .iter()
            .map(|&t| with_positive_theta(t, |t| Ok(levy_hat_integral(t, a, p)? * (x * cf))))
            .collect::<Result<_>>()?,
        GaussianLineHatZ => thetas
            .iter()
            .map(|&t| {
                with_positive_theta(t, |t| {
                    let mut f = |r: f64| psi(t * x * r.powf(1.0 - p)) * r.powf(p - 1.0 - a);
                    let head = integrate_head(&mut f, 1.0 - p - a, 1.0, &[], tol().with_abs(CHF_ABS_TOL / cf))?.value;
                    Ok((head + psi(t * x) / (a - p)) * cf)
                })
            })
            .collect::<Result<_>>()?,
        IntermediateI => thetas
            .iter()
            .map(|&t| {
                with_positive_theta(t, |t| {
                    let big_r = x.powf(1.0 / p);
                    let mut f = |r: f64| psi_trapezoid(t, r.powf(p), x) * r.powf(-1.0 - a);
                    let head =
                        integrate_head(&mut f, 2.0 * p - 1.0 - a, big_r, &[], tol().with_abs(CHF_ABS_TOL / cf))?.value;
                    Ok((head + constant_rate_tail(t, x, big_r, a, p)) * cf)
                })
            })
            .collect::<Result<_>>()?,
        IntermediateIHat => thetas
            .iter()
            .map(|&t| {
                with_positive_theta(t, |t| {
                    let big_r = x.powf(1.0 / p).max(1.0);
                    let mut f = |r: f64| psi_trapezoid(t * r.powf(1.0 - p).min(1.0), r.powf(p), x) * r.powf(-1.0 - a);
                    let breaks = [x.powf(1.0 / p).min(1.0)];
                    let head = integrate_head(&mut f, 1.0 - a, big_r, &breaks, tol().with_abs(CHF_ABS_TOL / cf))?.value;
                    Ok((head + constant_rate_tail(t, x, big_r, a, p)) * cf)
                })
            })
            .collect::<Result<_>>()?,
        IntermediateIPlus => thetas
            .iter()
            .map(|&t| intermediate_plus_log_chf(params, t, x, 1.0))
            .collect::<Result<_>>()?,
    };
    Ok(ChfCurve::theoretical_log(thetas.to_vec(), values))
}
