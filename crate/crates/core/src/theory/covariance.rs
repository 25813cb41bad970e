//! Covariance of the grain field, the angular function and the LRD
//! classification.

use super::exponents::check_alpha_p;
use super::params::ModelParams;
use crate::error::{Error, Result};
use crate::geometry::GrainShape;
use crate::quad::{integrate_tail, Tolerance};

fn tolerance(grain: &GrainShape) -> Tolerance {
    match grain {
        GrainShape::Custom(_) => Tolerance {
            abs: 0.0,
            rel: 1e-4,
            max_intervals: 20_000,
        },
        _ => Tolerance {
            abs: 1e-13,
            rel: 1e-10,
            max_intervals: 4000,
        },
    }
}

/// Smallest `r` at which `B` and `B + (dx / r^p, dy / r^{1-p})` can meet.
fn support_start(grain: &GrainShape, p: f64, dx: f64, dy: f64) -> f64 {
    let bb = grain.bounding_box();
    let (ax, ay) = (dx.abs(), dy.abs());
    let mut lo = 0.0f64;
    if ax > 0.0 {
        lo = lo.max((ax / bb.width()).powf(1.0 / p));
    }
    if ay > 0.0 {
        lo = lo.max((ay / bb.height()).powf(1.0 / (1.0 - p)));
    }
    if let GrainShape::UnitDisk = grain {
        // Overlap starts where the scaled centre distance drops to 2.
        let dist = |r: f64| (ax / r.powf(p)).hypot(ay / r.powf(1.0 - p));
        if lo > 0.0 && dist(lo) > 2.0 {
            let (mut a, mut b) = (lo, 2.0 * lo);
            while dist(b) > 2.0 {
                a = b;
                b *= 2.0;
            }
            for _ in 0..200 {
                let m = 0.5 * (a + b);
                if dist(m) > 2.0 {
                    a = m;
                } else {
                    b = m;
                }
                if b - a <= 1e-15 * b {
                    break;
                }
            }
            lo = b;
        }
    }
    lo
}

/// The angular function
/// `b(z) = c_f int_0^inf leb(B ∩ (B + (z / r^p, w / r^{1-p}))) r^{-alpha} dr`
/// with `w = (1 - |z|^{1/p})^{1-p}`.
pub fn angular_b(z: f64, params: &ModelParams) -> Result<f64> {
    if !(-1.0..=1.0).contains(&z) {
        return Err(Error::ZOutOfRange(z));
    }
    let (a, p) = (params.alpha, params.p);
    check_alpha_p(a, p, false)?;
    let w = (1.0 - z.abs().powf(1.0 / p)).max(0.0).powf(1.0 - p);
    let grain = &params.grain;
    let lo = support_start(grain, p, z, w);
    let mut f = |r: f64| grain.translate_overlap(z / r.powf(p), w / r.powf(1.0 - p)) * r.powf(-a);
    let est = integrate_tail(&mut f, lo, a - 1.0, &[], tolerance(grain))?;
    Ok(params.c_f() * est.value)
}

/// `rho(t, s) = Cov(X(t, s), X(0, 0)) = int leb(D_r B ∩ (D_r B + (t, s))) f(r) dr`.
pub fn covariance_exact(t: f64, s: f64, params: &ModelParams) -> Result<f64> {
    let (a, p, cf) = (params.alpha, params.p, params.c_f());
    check_alpha_p(a, p, false)?;
    let (at, as_) = (t.abs(), s.abs());
    match &params.grain {
        GrainShape::UnitSquare => {
            let r0 = params.r_min.max(at.powf(1.0 / p)).max(as_.powf(1.0 / (1.0 - p)));
            Ok(cf
                * (r0.powf(1.0 - a) / (a - 1.0)
                    - as_ * r0.powf(p - a) / (a - p)
                    - at * r0.powf(1.0 - p - a) / (a - 1.0 + p)
                    + at * as_ * r0.powf(-a) / a))
        }
        grain => {
            let lo = params.r_min.max(support_start(grain, p, t, s));
            let mut f = |r: f64| grain.translate_overlap(t / r.powf(p), s / r.powf(1.0 - p)) * r * params.density(r);
            Ok(integrate_tail(&mut f, lo, a - 1.0, &[], tolerance(grain))?.value)
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Dependence {
    Lrd,
    Srd,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LrdClass {
    pub lrd: bool,
    pub vertical: Dependence,
    pub horizontal: Dependence,
}

/// Long-range dependence along each axis.
pub fn lrd_classify(alpha: f64, p: f64) -> Result<LrdClass> {
    check_alpha_p(alpha, p, false)?;
    let pick = |b: bool| if b { Dependence::Lrd } else { Dependence::Srd };
    Ok(LrdClass {
        lrd: true,
        vertical: pick(alpha <= 2.0 - p),
        horizontal: pick(alpha <= 1.0 + p),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{CustomGrain, Rect};
    use crate::theory::params::Usage;

    #[test]
    fn square_angular_endpoints() {
        let m = ModelParams::square(1.5, 0.5).unwrap();
        assert!((angular_b(1.0, &m).unwrap() - 1.5).abs() < 1e-9);
        assert!((angular_b(0.0, &m).unwrap() - 1.5).abs() < 1e-9);
        assert!((angular_b(-1.0, &m).unwrap() - 1.5).abs() < 1e-9);
        let m = ModelParams::square(1.7, 0.3).unwrap();
        let (a, p) = (1.7, 0.3);
        let b1 = a * p / ((a - 1.0) * (a + p - 1.0));
        let b0 = a * (1.0 - p) / ((a - 1.0) * (a - p));
        assert!((angular_b(1.0, &m).unwrap() - b1).abs() < 1e-9 * b1);
        assert!((angular_b(0.0, &m).unwrap() - b0).abs() < 1e-9 * b0);
    }

    #[test]
    fn disk_angular_constant_at_half() {
        let m = ModelParams::validate(1.5, 0.5, 1.0, GrainShape::UnitDisk, Usage::Field).unwrap();
        let b0 = angular_b(0.0, &m).unwrap();
        for &z in &[-0.9, -0.3, 0.2, 0.77, 1.0] {
            assert!((angular_b(z, &m).unwrap() - b0).abs() < 1e-8 * b0);
        }
        // c_f int_0^inf lens(r^{-1/2}) r^{-alpha} dr
        assert!(b0 > 0.0);
    }

    #[test]
    fn z_out_of_range() {
        let m = ModelParams::square(1.5, 0.5).unwrap();
        assert_eq!(angular_b(1.01, &m), Err(Error::ZOutOfRange(1.01)));
    }

    #[test]
    fn square_covariance_matches_quadrature() {
        let m = ModelParams::square(1.6, 0.4).unwrap();
        let grain = CustomGrain::new(
            |x, y| x > 0.0 && x <= 1.0 && y > 0.0 && y <= 1.0,
            Rect::new(0.0, 1.0, 0.0, 1.0),
            1.0,
            64,
        );
        let custom = ModelParams::validate(1.6, 0.4, 1.0, GrainShape::Custom(grain), Usage::Field).unwrap();
        assert!((covariance_exact(0.0, 0.0, &m).unwrap() - 1.6 / 0.6).abs() < 1e-12);
        for &(t, s) in &[(0.5, 0.0), (3.0, 2.0), (0.0, 7.0)] {
            let a = covariance_exact(t, s, &m).unwrap();
            let b = covariance_exact(t, s, &custom).unwrap();
            assert!((a - b).abs() < 3e-2 * a, "{t},{s}: {a} vs {b}");
        }
    }

    #[test]
    fn variance_is_area_times_mean() {
        let m = ModelParams::square(1.5, 0.5).unwrap();
        assert!((covariance_exact(0.0, 0.0, &m).unwrap() - 3.0).abs() < 1e-12);
        let d = ModelParams::validate(1.5, 0.5, 1.0, GrainShape::UnitDisk, Usage::Field).unwrap();
        let v = covariance_exact(0.0, 0.0, &d).unwrap();
        assert!((v - std::f64::consts::PI * 3.0).abs() < 1e-8);
    }

    #[test]
    fn asymptotics_along_axes() {
        let m = ModelParams::square(1.5, 0.5).unwrap();
        let b1 = angular_b(1.0, &m).unwrap();
        let t: f64 = 1e4;
        let ratio = covariance_exact(t, 0.0, &m).unwrap() / (b1 * t.powf(-(0.5 / 0.5)));
        assert!((ratio - 1.0).abs() < 1e-3, "{ratio}");
    }

    #[test]
    fn covariance_symmetric() {
        let d = ModelParams::validate(1.5, 0.4, 1.0, GrainShape::UnitDisk, Usage::Field).unwrap();
        for &(t, s) in &[(1.0, 2.0), (5.0, -3.0)] {
            let a = covariance_exact(t, s, &d).unwrap();
            let b = covariance_exact(-t, -s, &d).unwrap();
            assert!((a - b).abs() < 1e-12 * a.abs().max(1e-300));
        }
    }

    #[test]
    fn lrd_examples() {
        use Dependence::*;
        let c = lrd_classify(1.4, 0.5).unwrap();
        assert_eq!((c.lrd, c.vertical, c.horizontal), (true, Lrd, Lrd));
        let c = lrd_classify(1.8, 0.5).unwrap();
        assert_eq!((c.lrd, c.vertical, c.horizontal), (true, Srd, Srd));
        let c = lrd_classify(1.5, 0.5).unwrap();
        assert_eq!((c.vertical, c.horizontal), (Lrd, Lrd));
        assert!(lrd_classify(1.5, 1.0).is_err());
    }
}
