use crate::error::{Error, Result};
use crate::geometry::GrainShape;

/// Which side of the model the parameters are meant for. The workload
/// model admits `p = 1`; the field model does not.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Usage {
    Field,
    Workload,
}

/// Model parameters with Pareto(`alpha`, `r_min`) grain radii.
///
/// Construct through [`ModelParams::validate`]; the derived moments are
/// filled in there.
#[derive(Debug, Clone)]
pub struct ModelParams {
    pub alpha: f64,
    pub p: f64,
    pub r_min: f64,
    pub grain: GrainShape,
    c_f: f64,
    mean_r: f64,
    mean_r_p: f64,
    mean_r_1mp: f64,
}

impl PartialEq for ModelParams {
    fn eq(&self, other: &Self) -> bool {
        self.alpha == other.alpha && self.p == other.p && self.r_min == other.r_min && self.grain == other.grain
    }
}

impl ModelParams {
    pub fn validate(alpha: f64, p: f64, r_min: f64, grain: GrainShape, usage: Usage) -> Result<Self> {
        if !(alpha > 1.0 && alpha < 2.0) {
            return Err(Error::AlphaOutOfRange(alpha));
        }
        match usage {
            Usage::Field if !(p > 0.0 && p < 1.0) => {
                return Err(Error::POutOfRange {
                    value: p,
                    range: "(0,1)",
                });
            }
            Usage::Workload if !(p > 0.0 && p <= 1.0) => {
                return Err(Error::POutOfRange {
                    value: p,
                    range: "(0,1]",
                });
            }
            _ => {}
        }
        if !(r_min > 0.0 && r_min.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "r_min must be positive and finite, got {r_min}"
            )));
        }
        let area = grain.area();
        if !(area > 0.0 && area.is_finite()) {
            return Err(Error::BadGrain(format!("area must be positive and finite, got {area}")));
        }
        let bb = grain.bounding_box();
        if ![bb.x0, bb.x1, bb.y0, bb.y1].iter().all(|v| v.is_finite()) || bb.x1 <= bb.x0 || bb.y1 <= bb.y0 {
            return Err(Error::BadGrain(format!(
                "bounding box must be finite and non-empty, got {bb:?}"
            )));
        }
        if area > bb.area() * (1.0 + 1e-9) {
            return Err(Error::BadGrain(format!(
                "area {area} exceeds bounding box area {}",
                bb.area()
            )));
        }
        let m = |q: f64| alpha * r_min.powf(q) / (alpha - q);
        Ok(ModelParams {
            alpha,
            p,
            r_min,
            grain,
            c_f: alpha * r_min.powf(alpha),
            mean_r: m(1.0),
            mean_r_p: m(p),
            mean_r_1mp: m(1.0 - p),
        })
    }

    /// Field parameters with the unit square grain and `r_min = 1`.
    pub fn square(alpha: f64, p: f64) -> Result<Self> {
        Self::validate(alpha, p, 1.0, GrainShape::UnitSquare, Usage::Field)
    }

    pub fn usage_ok(&self, usage: Usage) -> bool {
        usage == Usage::Workload || self.p < 1.0
    }

    /// Tail constant `c_f = alpha * r_min^alpha`.
    pub fn c_f(&self) -> f64 {
        self.c_f
    }

    pub fn mean_r(&self) -> f64 {
        self.mean_r
    }

    pub fn mean_r_p(&self) -> f64 {
        self.mean_r_p
    }

    pub fn mean_r_1mp(&self) -> f64 {
        self.mean_r_1mp
    }

    /// `E R^q` for `q < alpha`.
    pub fn moment(&self, q: f64) -> f64 {
        debug_assert!(q < self.alpha);
        self.alpha * self.r_min.powf(q) / (self.alpha - q)
    }

    /// `E[R^q ; R <= c]`.
    pub fn partial_moment_below(&self, q: f64, c: f64) -> f64 {
        if c <= self.r_min {
            return 0.0;
        }
        let a = self.alpha;
        let lo = self.r_min;
        if (q - a).abs() < 1e-14 {
            return self.c_f * (c / lo).ln();
        }
        self.c_f * (c.powf(q - a) - lo.powf(q - a)) / (q - a)
    }

    /// `E[R^q ; R > c]` for `q < alpha`.
    pub fn partial_moment_above(&self, q: f64, c: f64) -> f64 {
        let c = c.max(self.r_min);
        self.c_f * c.powf(q - self.alpha) / (self.alpha - q)
    }

    /// Pareto density.
    pub fn density(&self, r: f64) -> f64 {
        if r < self.r_min {
            0.0
        } else {
            self.c_f * r.powf(-1.0 - self.alpha)
        }
    }

    /// The same parameters with `p -> 1 - p` and the reflected grain.
    pub fn reflected(&self) -> Result<Self> {
        Self::validate(
            self.alpha,
            1.0 - self.p,
            self.r_min,
            self.grain.reflected(),
            Usage::Field,
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pareto_moments() {
        let m = ModelParams::square(1.5, 0.5).unwrap();
        assert_eq!(m.c_f(), 1.5);
        assert!((m.mean_r() - 3.0).abs() < 1e-15);
        assert!((m.mean_r_p() - 1.5).abs() < 1e-15);
        assert!((m.mean_r_1mp() - 1.5).abs() < 1e-15);
    }

    #[test]
    fn range_checks() {
        assert_eq!(ModelParams::square(1.0, 0.5).unwrap_err(), Error::AlphaOutOfRange(1.0));
        assert!(matches!(ModelParams::square(2.0, 0.5), Err(Error::AlphaOutOfRange(_))));
        assert!(matches!(ModelParams::square(1.5, 1.0), Err(Error::POutOfRange { .. })));
        assert!(ModelParams::validate(1.5, 1.0, 1.0, GrainShape::UnitSquare, Usage::Workload).is_ok());
        assert!(matches!(
            ModelParams::validate(1.5, 0.5, 0.0, GrainShape::UnitSquare, Usage::Field),
            Err(Error::InvalidArgument(_))
        ));
    }

    #[test]
    fn partial_moments_add_up() {
        let m = ModelParams::validate(1.3, 0.4, 2.0, GrainShape::UnitDisk, Usage::Field).unwrap();
        for &q in &[0.4, 0.6, 1.0] {
            let total = m.partial_moment_below(q, 7.5) + m.partial_moment_above(q, 7.5);
            assert!((total - m.moment(q)).abs() < 1e-12 * m.moment(q));
        }
        assert!((m.partial_moment_above(1.0, 0.1) - m.mean_r()).abs() < 1e-12);
    }
}
