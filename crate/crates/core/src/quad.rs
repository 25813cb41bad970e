//! Globally adaptive Gauss–Kronrod (10/21-point) quadrature.
//!
//! Intervals are bisected in order of their local error estimate until the
//! summed estimate falls below `max(abs_tol, rel_tol * |value|)`. The
//! integrand is never evaluated at interval end points, so integrable end
//! point singularities and the `t / (1 - t)` map to a half line are fine.

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::ops::{Add, Mul, Sub};

use num_complex::Complex64;

use crate::error::{Error, Result};

const XGK: [f64; 11] = [
    0.995_657_163_025_808_080_735_527_280_689_003,
    0.973_906_528_517_171_720_077_964_012_084_452,
    0.930_157_491_355_708_226_001_207_180_059_508,
    0.865_063_366_688_984_510_732_096_688_423_493,
    0.780_817_726_586_416_897_063_717_578_345_042,
    0.679_409_568_299_024_406_234_327_365_114_874,
    0.562_757_134_668_604_683_339_000_099_272_694,
    0.433_395_394_129_247_190_799_265_943_165_784,
    0.294_392_862_701_460_198_131_126_603_103_866,
    0.148_874_338_981_631_210_884_826_001_129_720,
    0.0,
];

const WGK: [f64; 11] = [
    0.011_694_638_867_371_874_278_064_396_062_192,
    0.032_558_162_307_964_727_478_818_972_459_390,
    0.054_755_896_574_351_996_031_381_300_244_580,
    0.075_039_674_810_919_952_767_043_140_916_190,
    0.093_125_454_583_697_605_535_065_465_083_366,
    0.109_387_158_802_297_641_899_210_590_325_805,
    0.123_491_976_262_065_851_077_600_311_751_823,
    0.134_709_217_311_473_325_928_054_001_771_707,
    0.142_775_938_577_060_080_797_094_273_138_717,
    0.147_739_104_901_338_491_374_841_515_972_068,
    0.149_445_554_002_916_905_664_936_468_389_821,
];

// Gauss weights for the odd-indexed Kronrod abscissae.
const WG: [f64; 5] = [
    0.066_671_344_308_688_137_593_568_809_893_332,
    0.149_451_349_150_580_593_145_776_339_657_697,
    0.219_086_362_515_982_043_995_534_934_228_163,
    0.269_266_719_309_996_355_091_226_921_569_469,
    0.295_524_224_714_752_870_173_892_994_651_338,
];

/// Values that can be integrated: reals and complex numbers.
pub trait QuadValue: Copy + Add<Output = Self> + Sub<Output = Self> + Mul<f64, Output = Self> {
    fn zero() -> Self;
    fn magnitude(self) -> f64;
}

impl QuadValue for f64 {
    fn zero() -> Self {
        0.0
    }
    fn magnitude(self) -> f64 {
        self.abs()
    }
}

impl QuadValue for Complex64 {
    fn zero() -> Self {
        Complex64::new(0.0, 0.0)
    }
    fn magnitude(self) -> f64 {
        self.norm()
    }
}

/// Integral estimate with its absolute error estimate.
#[derive(Debug, Clone, Copy)]
pub struct Estimate<T> {
    pub value: T,
    pub error: f64,
}

/// Tolerances and subdivision limit.
#[derive(Debug, Clone, Copy)]
pub struct Tolerance {
    pub abs: f64,
    pub rel: f64,
    pub max_intervals: usize,
}

impl Tolerance {
    pub fn abs(abs: f64) -> Self {
        Tolerance {
            abs,
            rel: 0.0,
            max_intervals: 4000,
        }
    }

    pub fn rel(rel: f64) -> Self {
        Tolerance {
            abs: 0.0,
            rel,
            max_intervals: 4000,
        }
    }

    pub fn with_abs(mut self, abs: f64) -> Self {
        self.abs = abs;
        self
    }
}

/// Default absolute tolerance of a single 1-D pass.
pub const DEFAULT_ABS_TOL: f64 = 1e-8;

struct Segment<T> {
    a: f64,
    b: f64,
    value: T,
    error: f64,
}

impl<T> PartialEq for Segment<T> {
    fn eq(&self, other: &Self) -> bool {
        self.error == other.error
    }
}
impl<T> Eq for Segment<T> {}
impl<T> PartialOrd for Segment<T> {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl<T> Ord for Segment<T> {
    fn cmp(&self, other: &Self) -> Ordering {
        self.error.total_cmp(&other.error)
    }
}

fn kronrod21<T: QuadValue, F: FnMut(f64) -> T>(f: &mut F, a: f64, b: f64) -> (T, f64) {
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let fc = f(center);
    let mut kronrod = fc * WGK[10];
    let mut gauss = T::zero();
    for j in 0..10 {
        let dx = half * XGK[j];
        let pair = f(center - dx) + f(center + dx);
        kronrod = kronrod + pair * WGK[j];
        if j % 2 == 1 {
            gauss = gauss + pair * WG[j / 2];
        }
    }
    let k = kronrod * half;
    let g = gauss * half;
    (k, (k - g).magnitude())
}

/// Integrates `f` over the finite interval `[a, b]`.
pub fn integrate<T, F>(mut f: F, a: f64, b: f64, tol: Tolerance) -> Result<Estimate<T>>
where
    T: QuadValue,
    F: FnMut(f64) -> T,
{
    integrate_points(&mut f, &[a, b], tol)
}

/// Integrates over `[points[0], points[last]]`, seeding the subdivision with
/// the given break points (kinks, discontinuities).
pub fn integrate_points<T, F>(f: &mut F, points: &[f64], tol: Tolerance) -> Result<Estimate<T>>
where
    T: QuadValue,
    F: FnMut(f64) -> T,
{
    if points.len() < 2 {
        return Ok(Estimate {
            value: T::zero(),
            error: 0.0,
        });
    }
    let mut heap = BinaryHeap::new();
    let mut value = T::zero();
    let mut error = 0.0;
    for w in points.windows(2) {
        let (a, b) = (w[0], w[1]);
        if !(b > a) {
            continue;
        }
        let (v, e) = kronrod21(f, a, b);
        value = value + v;
        error += e;
        heap.push(Segment {
            a,
            b,
            value: v,
            error: e,
        });
    }
    let mut intervals = heap.len();
    loop {
        // Below a few ulps of the total, further bisection only chases rounding.
        let target = tol.abs.max(tol.rel.max(64.0 * f64::EPSILON) * value.magnitude());
        if error <= target {
            break;
        }
        if intervals >= tol.max_intervals {
            return Err(Error::QuadratureFailure {
                context: format!(
                    "{} subintervals on [{}, {}]",
                    intervals,
                    points[0],
                    points[points.len() - 1]
                ),
                tolerance: target,
                estimate: error,
            });
        }
        let Some(worst) = heap.pop() else { break };
        let mid = 0.5 * (worst.a + worst.b);
        if !(mid > worst.a && mid < worst.b) {
            return Err(Error::QuadratureFailure {
                context: format!("interval [{}, {}] exhausted at machine resolution", worst.a, worst.b),
                tolerance: target,
                estimate: error,
            });
        }
        let (v1, e1) = kronrod21(f, worst.a, mid);
        let (v2, e2) = kronrod21(f, mid, worst.b);
        value = value - worst.value + v1 + v2;
        error += e1 + e2 - worst.error;
        heap.push(Segment {
            a: worst.a,
            b: mid,
            value: v1,
            error: e1,
        });
        heap.push(Segment {
            a: mid,
            b: worst.b,
            value: v2,
            error: e2,
        });
        intervals += 1;
    }
    // Recompute the sum from the leaves to shed accumulated rounding.
    let mut total = T::zero();
    let mut total_err = 0.0;
    for s in heap.iter() {
        total = total + s.value;
        total_err += s.error;
    }
    Ok(Estimate {
        value: total,
        error: total_err.max(error.max(0.0)),
    })
}

/// Integrates over `[a, inf)` through `x = a + t / (1 - t)`. Extra break
/// points above `a` are mapped into the unit interval.
pub fn integrate_to_infinity<T, F>(mut f: F, a: f64, breaks: &[f64], tol: Tolerance) -> Result<Estimate<T>>
where
    T: QuadValue,
    F: FnMut(f64) -> T,
{
    let mut pts = vec![0.0];
    let mut inner: Vec<f64> = breaks
        .iter()
        .filter(|&&x| x > a && x.is_finite())
        .map(|&x| {
            let d = x - a;
            d / (1.0 + d)
        })
        .collect();
    inner.sort_by(f64::total_cmp);
    inner.dedup();
    pts.extend(inner);
    pts.push(1.0);
    let mut g = |t: f64| {
        let one_minus = 1.0 - t;
        let x = a + t / one_minus;
        f(x) * (1.0 / (one_minus * one_minus))
    };
    integrate_points(&mut g, &pts, tol)
}

/// Integrates over `(0, inf)` an integrand behaving like `r^{lower}` near
/// zero (`lower > -1`) and like `r^{-1-decay}` at infinity (`decay > 0`).
///
/// The two power laws are removed by the substitutions `r = c t^{1/(1+lower)}`
/// on `(0, c]` and `r = c s^{-1/decay}` on `[c, inf)`, so both pieces have
/// bounded integrands. `breaks` are points of `(0, inf)` where `f` has kinks.
pub fn integrate_power_law<T, F>(
    mut f: F,
    lower: f64,
    decay: f64,
    pivot: f64,
    breaks: &[f64],
    tol: Tolerance,
) -> Result<Estimate<T>>
where
    T: QuadValue,
    F: FnMut(f64) -> T,
{
    debug_assert!(lower > -1.0 && decay > 0.0 && pivot > 0.0);
    let half_tol = Tolerance {
        abs: 0.5 * tol.abs,
        ..tol
    };
    let tail_pts: Vec<f64> = breaks.iter().copied().filter(|&b| b > pivot).collect();
    let a = integrate_head(&mut f, lower, pivot, breaks, half_tol)?;
    let b = integrate_tail(&mut f, pivot, decay, &tail_pts, half_tol)?;
    Ok(Estimate {
        value: a.value + b.value,
        error: a.error + b.error,
    })
}

/// Integrates over `(0, c]` an integrand behaving like `r^{lower}` near zero,
/// through `r = c t^{1/(1+lower)}`. Breaks outside `(0, c)` are ignored.
pub fn integrate_head<T, F>(f: &mut F, lower: f64, c: f64, breaks: &[f64], tol: Tolerance) -> Result<Estimate<T>>
where
    T: QuadValue,
    F: FnMut(f64) -> T,
{
    debug_assert!(lower > -1.0 && c > 0.0);
    let m = 1.0 / (1.0 + lower);
    let mut pts = vec![0.0, 1.0];
    pts.extend(
        breaks
            .iter()
            .filter(|&&b| b > 0.0 && b < c)
            .map(|&b| (b / c).powf(1.0 / m)),
    );
    pts.sort_by(f64::total_cmp);
    pts.dedup();
    let mut g = |t: f64| {
        let r = c * t.powf(m);
        f(r) * (c * m * t.powf(m - 1.0))
    };
    integrate_points(&mut g, &pts, tol)
}

/// Integrates over `[c, inf)` an integrand decaying like `r^{-1-decay}`,
/// through `r = c s^{-1/decay}`.
pub fn integrate_tail<T, F>(f: &mut F, c: f64, decay: f64, breaks: &[f64], tol: Tolerance) -> Result<Estimate<T>>
where
    T: QuadValue,
    F: FnMut(f64) -> T,
{
    debug_assert!(c > 0.0 && decay > 0.0);
    let mut pts = vec![0.0, 1.0];
    pts.extend(
        breaks
            .iter()
            .filter(|&&b| b > c && b.is_finite())
            .map(|&b| (c / b).powf(decay)),
    );
    pts.sort_by(f64::total_cmp);
    pts.dedup();
    let mut g = |s: f64| {
        let r = c * s.powf(-1.0 / decay);
        f(r) * (c / decay * s.powf(-1.0 / decay - 1.0))
    };
    integrate_points(&mut g, &pts, tol)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn power_law_substitution() {
        // int_0^inf r^{-0.9} / (1 + r)^{0.5} dr = B(0.1, 0.4)
        let exact = statrs::function::beta::beta(0.1, 0.4);
        let r = integrate_power_law(
            |r: f64| r.powf(-0.9) / (1.0 + r).sqrt(),
            -0.9,
            0.4,
            1.0,
            &[],
            Tolerance::rel(1e-11),
        )
        .unwrap();
        assert!((r.value - exact).abs() < 1e-9 * exact, "{} vs {}", r.value, exact);
    }

    #[test]
    fn polynomial_is_exact() {
        let r = integrate(|x: f64| x.powi(5) - 3.0 * x * x, -1.0, 2.0, Tolerance::abs(1e-13)).unwrap();
        let exact = (64.0 - 1.0) / 6.0 - (8.0 + 1.0);
        assert!((r.value - exact).abs() < 1e-12);
    }

    #[test]
    fn endpoint_singularity() {
        let r = integrate(|x: f64| x.powf(-0.5), 0.0, 1.0, Tolerance::abs(1e-10)).unwrap();
        assert!((r.value - 2.0).abs() < 1e-8, "{}", r.value);
    }

    #[test]
    fn heavy_power_tail() {
        // int_1^inf x^{-1.5} dx = 2
        let mut f = |x: f64| x.powf(-1.5);
        let r = integrate_tail(&mut f, 1.0, 0.5, &[], Tolerance::abs(1e-10)).unwrap();
        assert!((r.value - 2.0).abs() < 1e-8, "{}", r.value);
    }

    #[test]
    fn fast_tail_to_infinity() {
        // int_1^inf x^{-3} dx = 1/2
        let r = integrate_to_infinity(|x: f64| x.powi(-3), 1.0, &[2.0], Tolerance::abs(1e-12)).unwrap();
        assert!((r.value - 0.5).abs() < 1e-11, "{}", r.value);
    }

    #[test]
    fn kink_with_break_point() {
        let mut f = |x: f64| (x - 0.3).abs();
        let r = integrate_points(&mut f, &[0.0, 0.3, 1.0], Tolerance::abs(1e-14)).unwrap();
        assert!((r.value - (0.045 + 0.245)).abs() < 1e-13);
    }

    #[test]
    fn complex_integrand() {
        let r = integrate(
            |x: f64| Complex64::new(0.0, x).exp(),
            0.0,
            std::f64::consts::PI,
            Tolerance::abs(1e-12),
        )
        .unwrap();
        assert!((r.value - Complex64::new(0.0, 2.0)).norm() < 1e-11);
    }

    #[test]
    fn impossible_tolerance_fails() {
        let tol = Tolerance {
            abs: 1e-30,
            rel: 0.0,
            max_intervals: 8,
        };
        let r = integrate(|x: f64| (1.0 / x).sin(), 1e-6, 1.0, tol);
        assert!(matches!(r, Err(Error::QuadratureFailure { .. })));
    }
}
