use crate::error::{Error, Result};
use crate::geometry::GrainShape;

/// The change points `gamma_-`, `gamma_+` and the stability indices
/// `alpha_-`, `alpha_+`. For `p = 1`, `alpha_plus` is `+inf` and the minus
/// side is undefined (`NaN`).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CriticalExponents {
    pub gamma_minus: f64,
    pub gamma_plus: f64,
    pub alpha_minus: f64,
    pub alpha_plus: f64,
}

pub(crate) fn check_alpha_p(alpha: f64, p: f64, allow_p_one: bool) -> Result<()> {
    if !(alpha > 1.0 && alpha < 2.0) {
        return Err(Error::AlphaOutOfRange(alpha));
    }
    if allow_p_one {
        if !(p > 0.0 && p <= 1.0) {
            return Err(Error::POutOfRange {
                value: p,
                range: "(0,1]",
            });
        }
    } else if !(p > 0.0 && p < 1.0) {
        return Err(Error::POutOfRange {
            value: p,
            range: "(0,1)",
        });
    }
    Ok(())
}

pub fn critical_exponents(alpha: f64, p: f64) -> Result<CriticalExponents> {
    check_alpha_p(alpha, p, true)?;
    if p == 1.0 {
        return Ok(CriticalExponents {
            gamma_minus: f64::NAN,
            gamma_plus: alpha - 1.0,
            alpha_minus: alpha,
            alpha_plus: f64::INFINITY,
        });
    }
    Ok(CriticalExponents {
        gamma_minus: (1.0 - p) / (alpha - (1.0 - p)),
        gamma_plus: alpha / p - 1.0,
        alpha_minus: (alpha - 1.0 + p) / p,
        alpha_plus: (alpha - p) / (1.0 - p),
    })
}

/// `H_+ = (2 - alpha + p) / (2p)`.
pub fn h_plus(alpha: f64, p: f64) -> f64 {
    (2.0 - alpha + p) / (2.0 * p)
}

/// `H_- = (3 - p - alpha) / (2(1 - p))`.
pub fn h_minus(alpha: f64, p: f64) -> f64 {
    (3.0 - p - alpha) / (2.0 * (1.0 - p))
}

/// `(gamma, p, B) -> (1/gamma, 1 - p, B*)`.
pub fn reflect_params(gamma: f64, p: f64, grain: &GrainShape) -> Result<(f64, f64, GrainShape)> {
    if !(gamma > 0.0 && gamma.is_finite()) {
        return Err(Error::InvalidArgument(format!("gamma must be positive, got {gamma}")));
    }
    if !(p > 0.0 && p < 1.0) {
        return Err(Error::POutOfRange {
            value: p,
            range: "(0,1)",
        });
    }
    Ok((1.0 / gamma, 1.0 - p, grain.reflected()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reference_points() {
        let e = critical_exponents(1.5, 0.5).unwrap();
        assert_eq!(
            (e.gamma_minus, e.gamma_plus, e.alpha_minus, e.alpha_plus),
            (0.5, 2.0, 2.0, 2.0)
        );
        let e = critical_exponents(1.2, 0.8).unwrap();
        assert!((e.gamma_minus - 0.2).abs() < 1e-15);
        assert!((e.gamma_plus - 0.5).abs() < 1e-15);
        assert!((e.alpha_minus - 1.25).abs() < 1e-15);
        assert!((e.alpha_plus - 2.0).abs() < 1e-14);
    }

    #[test]
    fn p_one_has_infinite_alpha_plus() {
        let e = critical_exponents(1.5, 1.0).unwrap();
        assert!(e.alpha_plus.is_infinite());
        assert_eq!(e.gamma_plus, 0.5);
    }

    #[test]
    fn reflection_is_an_involution() {
        let (g, p, b) = reflect_params(0.4, 0.3, &GrainShape::UnitSquare).unwrap();
        let (g2, p2, b2) = reflect_params(g, p, &b).unwrap();
        assert!((g2 - 0.4).abs() < 1e-15);
        assert!((p2 - 0.3).abs() < 1e-15);
        assert_eq!(b2, GrainShape::UnitSquare);
    }

    #[test]
    fn gamma_minus_reflects_to_gamma_plus() {
        let alpha = 1.37;
        let p = 0.29;
        let e = critical_exponents(alpha, p).unwrap();
        let r = critical_exponents(alpha, 1.0 - p).unwrap();
        assert!((r.gamma_plus - 1.0 / e.gamma_minus).abs() < 1e-12);
        assert!((r.alpha_plus - e.alpha_minus).abs() < 1e-12);
        assert!((h_plus(alpha, 1.0 - p) - h_minus(alpha, p)).abs() < 1e-12);
    }
}
