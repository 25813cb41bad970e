//! Grain shapes and the planar measure computations the model needs:
//! section lengths, translate overlaps, and intersections of dilated grains
//! with axis-aligned observation rectangles.

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

/// Axis-aligned rectangle `[x0, x1] x [y0, y1]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Rect {
    pub x0: f64,
    pub x1: f64,
    pub y0: f64,
    pub y1: f64,
}

impl Rect {
    pub fn new(x0: f64, x1: f64, y0: f64, y1: f64) -> Self {
        Rect { x0, x1, y0, y1 }
    }

    pub fn width(&self) -> f64 {
        self.x1 - self.x0
    }

    pub fn height(&self) -> f64 {
        self.y1 - self.y0
    }

    pub fn area(&self) -> f64 {
        self.width().max(0.0) * self.height().max(0.0)
    }
}

/// Precomputed `u -> leb1(B(u))` on a uniform grid over the bounding box.
#[derive(Debug, Clone)]
pub struct SectionTable {
    pub u0: f64,
    pub u1: f64,
    pub values: Vec<f64>,
}

impl SectionTable {
    fn eval(&self, u: f64) -> f64 {
        if u <= self.u0 || u >= self.u1 || self.values.is_empty() {
            return 0.0;
        }
        let n = self.values.len();
        let pos = (u - self.u0) / (self.u1 - self.u0) * n as f64;
        let i = (pos as usize).min(n - 1);
        self.values[i]
    }
}

type Indicator = Arc<dyn Fn(f64, f64) -> bool + Send + Sync>;

/// A user supplied grain given by its indicator.
///
/// The boundary of the set must have zero Lebesgue measure; this cannot be
/// checked for an arbitrary predicate and is the caller's obligation.
#[derive(Clone)]
pub struct CustomGrain {
    indicator: Indicator,
    bbox: Rect,
    area: f64,
    sections: Option<SectionTable>,
    resolution: usize,
}

impl fmt::Debug for CustomGrain {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("CustomGrain")
            .field("bbox", &self.bbox)
            .field("area", &self.area)
            .field("resolution", &self.resolution)
            .finish()
    }
}

impl CustomGrain {
    /// `resolution` is the per-axis cell count of the midpoint rule used for
    /// every area computation involving this grain.
    pub fn new<F>(indicator: F, bbox: Rect, area: f64, resolution: usize) -> Self
    where
        F: Fn(f64, f64) -> bool + Send + Sync + 'static,
    {
        CustomGrain {
            indicator: Arc::new(indicator),
            bbox,
            area,
            sections: None,
            resolution: resolution.max(8),
        }
    }

    pub fn with_section_table(mut self, table: SectionTable) -> Self {
        self.sections = Some(table);
        self
    }

    pub fn bbox(&self) -> Rect {
        self.bbox
    }

    pub fn area(&self) -> f64 {
        self.area
    }

    fn contains(&self, x: f64, y: f64) -> bool {
        x >= self.bbox.x0 && x <= self.bbox.x1 && y >= self.bbox.y0 && y <= self.bbox.y1 && (self.indicator)(x, y)
    }

    fn section(&self, u: f64) -> f64 {
        if let Some(t) = &self.sections {
            return t.eval(u);
        }
        if u < self.bbox.x0 || u > self.bbox.x1 {
            return 0.0;
        }
        let n = self.resolution * 4;
        let h = self.bbox.height() / n as f64;
        (0..n)
            .filter(|&j| self.contains(u, self.bbox.y0 + (j as f64 + 0.5) * h))
            .count() as f64
            * h
    }

    fn section_cdf(&self, w: f64) -> f64 {
        let (x0, x1) = (self.bbox.x0, self.bbox.x1);
        if w <= x0 {
            return 0.0;
        }
        let w = w.min(x1);
        let n = ((w - x0) / (x1 - x0) * (self.resolution * 4) as f64).ceil().max(1.0) as usize;
        let h = (w - x0) / n as f64;
        (0..n).map(|i| self.section(x0 + (i as f64 + 0.5) * h)).sum::<f64>() * h
    }

    /// Measure of `{(x, y) in rect : indicator((x - cx) / sx, (y - cy) / sy)}`.
    fn scaled_overlap(&self, cx: f64, cy: f64, sx: f64, sy: f64, rect: &Rect) -> f64 {
        let lx0 = ((rect.x0 - cx) / sx).max(self.bbox.x0);
        let lx1 = ((rect.x1 - cx) / sx).min(self.bbox.x1);
        let ly0 = ((rect.y0 - cy) / sy).max(self.bbox.y0);
        let ly1 = ((rect.y1 - cy) / sy).min(self.bbox.y1);
        if lx1 <= lx0 || ly1 <= ly0 {
            return 0.0;
        }
        let n = self.resolution;
        let hx = (lx1 - lx0) / n as f64;
        let hy = (ly1 - ly0) / n as f64;
        let mut hits = 0usize;
        for i in 0..n {
            let x = lx0 + (i as f64 + 0.5) * hx;
            for j in 0..n {
                if self.contains(x, ly0 + (j as f64 + 0.5) * hy) {
                    hits += 1;
                }
            }
        }
        hits as f64 * hx * hy * sx * sy
    }

    fn reflected(&self) -> CustomGrain {
        let ind = self.indicator.clone();
        CustomGrain {
            indicator: Arc::new(move |x, y| ind(y, x)),
            bbox: Rect::new(self.bbox.y0, self.bbox.y1, self.bbox.x0, self.bbox.x1),
            area: self.area,
            sections: None,
            resolution: self.resolution,
        }
    }
}

/// The generic grain `B`.
///
/// `UnitSquare` is `(0,1]^2`, so a dilated grain with base point `(u, v)` is
/// the rectangle `(u, u + R^p] x (v, v + R^{1-p}]`. `UnitDisk` is the closed
/// unit disk centred at the origin, so dilated grains are ellipses centred at
/// their base point.
#[derive(Debug, Clone)]
pub enum GrainShape {
    UnitSquare,
    UnitDisk,
    Custom(CustomGrain),
}

impl PartialEq for GrainShape {
    fn eq(&self, other: &Self) -> bool {
        match (self, other) {
            (GrainShape::UnitSquare, GrainShape::UnitSquare) => true,
            (GrainShape::UnitDisk, GrainShape::UnitDisk) => true,
            (GrainShape::Custom(a), GrainShape::Custom(b)) => Arc::ptr_eq(&a.indicator, &b.indicator),
            _ => false,
        }
    }
}

impl GrainShape {
    pub fn name(&self) -> &'static str {
        match self {
            GrainShape::UnitSquare => "square",
            GrainShape::UnitDisk => "disk",
            GrainShape::Custom(_) => "custom",
        }
    }

    /// `leb(B)`.
    pub fn area(&self) -> f64 {
        match self {
            GrainShape::UnitSquare => 1.0,
            GrainShape::UnitDisk => PI,
            GrainShape::Custom(c) => c.area,
        }
    }

    pub fn bounding_box(&self) -> Rect {
        match self {
            GrainShape::UnitSquare => Rect::new(0.0, 1.0, 0.0, 1.0),
            GrainShape::UnitDisk => Rect::new(-1.0, 1.0, -1.0, 1.0),
            GrainShape::Custom(c) => c.bbox,
        }
    }

    pub fn contains(&self, x: f64, y: f64) -> bool {
        match self {
            GrainShape::UnitSquare => x > 0.0 && x <= 1.0 && y > 0.0 && y <= 1.0,
            GrainShape::UnitDisk => x * x + y * y <= 1.0,
            GrainShape::Custom(c) => c.contains(x, y),
        }
    }

    /// Section length `leb1(B(u))` with `B(u) = {v : (u, v) in B}`.
    pub fn section_length(&self, u: f64) -> f64 {
        match self {
            GrainShape::UnitSquare => {
                if u > 0.0 && u <= 1.0 {
                    1.0
                } else {
                    0.0
                }
            }
            GrainShape::UnitDisk => {
                if u.abs() < 1.0 {
                    2.0 * (1.0 - u * u).sqrt()
                } else {
                    0.0
                }
            }
            GrainShape::Custom(c) => c.section(u),
        }
    }

    /// `int_{-inf}^{w} leb1(B(u)) du`.
    pub fn section_cdf(&self, w: f64) -> f64 {
        match self {
            GrainShape::UnitSquare => w.clamp(0.0, 1.0),
            GrainShape::UnitDisk => 2.0 * half_disk_primitive(w) + 0.5 * PI,
            GrainShape::Custom(c) => c.section_cdf(w),
        }
    }

    /// Points where `section_length` is not smooth, including the ends of
    /// its support.
    pub fn section_breaks(&self) -> Vec<f64> {
        match self {
            GrainShape::UnitSquare => vec![0.0, 1.0],
            GrainShape::UnitDisk => vec![-1.0, 1.0],
            GrainShape::Custom(c) => vec![c.bbox.x0, c.bbox.x1],
        }
    }

    /// `leb(B ∩ (B + (dx, dy)))`.
    pub fn translate_overlap(&self, dx: f64, dy: f64) -> f64 {
        match self {
            GrainShape::UnitSquare => (1.0 - dx.abs()).max(0.0) * (1.0 - dy.abs()).max(0.0),
            GrainShape::UnitDisk => lens_area(dx.hypot(dy)),
            GrainShape::Custom(c) => {
                let b = c.bbox;
                let rect = Rect::new(
                    b.x0.max(b.x0 + dx),
                    b.x1.min(b.x1 + dx),
                    b.y0.max(b.y0 + dy),
                    b.y1.min(b.y1 + dy),
                );
                if rect.width() <= 0.0 || rect.height() <= 0.0 {
                    return 0.0;
                }
                let n = c.resolution;
                let hx = rect.width() / n as f64;
                let hy = rect.height() / n as f64;
                let mut hits = 0usize;
                for i in 0..n {
                    let x = rect.x0 + (i as f64 + 0.5) * hx;
                    for j in 0..n {
                        let y = rect.y0 + (j as f64 + 0.5) * hy;
                        if c.contains(x, y) && c.contains(x - dx, y - dy) {
                            hits += 1;
                        }
                    }
                }
                hits as f64 * hx * hy
            }
        }
    }

    /// Area of `(cx, cy) + diag(sx, sy) B` intersected with `rect`.
    pub fn dilated_overlap(&self, cx: f64, cy: f64, sx: f64, sy: f64, rect: &Rect) -> f64 {
        match self {
            GrainShape::UnitSquare => {
                interval_overlap(cx - rect.x0, sx, rect.width()) * interval_overlap(cy - rect.y0, sy, rect.height())
            }
            GrainShape::UnitDisk => {
                sx * sy
                    * unit_disk_rect_area(
                        (rect.x0 - cx) / sx,
                        (rect.x1 - cx) / sx,
                        (rect.y0 - cy) / sy,
                        (rect.y1 - cy) / sy,
                    )
            }
            GrainShape::Custom(c) => c.scaled_overlap(cx, cy, sx, sy, rect),
        }
    }

    /// Whether the dilated grain meets `rect` in a set of positive area.
    pub fn dilated_intersects(&self, cx: f64, cy: f64, sx: f64, sy: f64, rect: &Rect) -> bool {
        match self {
            GrainShape::UnitSquare => cx < rect.x1 && cx + sx > rect.x0 && cy < rect.y1 && cy + sy > rect.y0,
            GrainShape::UnitDisk => {
                // In coordinates scaled by (sx, sy) the ellipse is the unit disk and
                // the rectangle stays axis aligned, so clamping finds the nearest point.
                let px = ((rect.x0 - cx) / sx).max(0.0f64.min((rect.x1 - cx) / sx));
                let px = px.min((rect.x1 - cx) / sx);
                let py = ((rect.y0 - cy) / sy).max(0.0f64.min((rect.y1 - cy) / sy));
                let py = py.min((rect.y1 - cy) / sy);
                px * px + py * py < 1.0
            }
            GrainShape::Custom(c) => c.scaled_overlap(cx, cy, sx, sy, rect) > 0.0,
        }
    }

    /// The reflected grain `B* = {(u, v) : (v, u) in B}`.
    pub fn reflected(&self) -> GrainShape {
        match self {
            GrainShape::UnitSquare => GrainShape::UnitSquare,
            GrainShape::UnitDisk => GrainShape::UnitDisk,
            GrainShape::Custom(c) => GrainShape::Custom(c.reflected()),
        }
    }
}

/// `leb1((lo, lo + len] ∩ (0, width])`.
#[inline]
pub fn interval_overlap(lo: f64, len: f64, width: f64) -> f64 {
    ((lo + len).min(width) - lo.max(0.0)).max(0.0)
}

/// `∫ leb1((u, u + a] ∩ (0, l])^2 du` in closed form.
pub fn overlap_square_integral(a: f64, l: f64) -> f64 {
    if a <= l {
        a * a * l - a * a * a / 3.0
    } else {
        l * l * a - l * l * l / 3.0
    }
}

/// `∫ leb1((u, u + a] ∩ (0, l1]) * leb1((u, u + a] ∩ (0, l2]) du`.
///
/// The integrand is piecewise quadratic in `u`; Simpson's rule on each piece
/// is exact.
pub fn cross_overlap_integral(a: f64, l1: f64, l2: f64) -> f64 {
    let (lo, up) = (l1.min(l2), l1.max(l2));
    if a <= lo && (a <= up - lo || up == lo) {
        // Closed forms avoid the cancellation of tiny pieces.
        return if up == lo {
            a * a * lo - a * a * a / 3.0
        } else {
            a * a * lo - a * a * a / 6.0
        };
    }
    let hi = lo;
    let mut pts = [-a, 0.0, l1 - a, l1, l2 - a, l2];
    pts.sort_by(f64::total_cmp);
    let g = |u: f64| interval_overlap(u, a, l1) * interval_overlap(u, a, l2);
    let mut total = 0.0;
    let mut prev = -a;
    for &p in pts.iter().chain(std::iter::once(&hi)) {
        let q = p.min(hi);
        if q > prev {
            let m = 0.5 * (prev + q);
            total += (q - prev) / 6.0 * (g(prev) + 4.0 * g(m) + g(q));
            prev = q;
        }
    }
    total
}

/// Area of the lens formed by two unit disks at centre distance `d`.
pub fn lens_area(d: f64) -> f64 {
    if d >= 2.0 {
        0.0
    } else {
        2.0 * (d / 2.0).acos() - 0.5 * d * (4.0 - d * d).sqrt()
    }
}

fn half_disk_primitive(t: f64) -> f64 {
    // ∫_0^t sqrt(1 - s^2) ds
    let t = t.clamp(-1.0, 1.0);
    0.5 * (t * (1.0 - t * t).sqrt() + t.asin())
}

/// `∫_{x0}^{x1} leb1([-s(t), s(t)] ∩ (-inf, y]) dt` with `s(t) = sqrt(1 - t^2)`.
fn disk_area_below(x0: f64, x1: f64, y: f64) -> f64 {
    let x0 = x0.clamp(-1.0, 1.0);
    let x1 = x1.clamp(-1.0, 1.0);
    if x1 <= x0 || y <= -1.0 {
        return 0.0;
    }
    let s_int = |a: f64, b: f64| half_disk_primitive(b) - half_disk_primitive(a);
    if y >= 1.0 {
        return 2.0 * s_int(x0, x1);
    }
    let c = (1.0 - y * y).sqrt();
    let mut total = 0.0;
    // Inner band |t| < c: chord part below y has length y + s(t).
    let (a, b) = (x0.max(-c), x1.min(c));
    if b > a {
        total += y * (b - a) + s_int(a, b);
    }
    if y > 0.0 {
        // Outside the band the whole chord lies below y.
        let (a, b) = (x0, x1.min(-c));
        if b > a {
            total += 2.0 * s_int(a, b);
        }
        let (a, b) = (x0.max(c), x1);
        if b > a {
            total += 2.0 * s_int(a, b);
        }
    }
    total
}

/// Exact area of the unit disk intersected with `[x0, x1] x [y0, y1]`.
pub fn unit_disk_rect_area(x0: f64, x1: f64, y0: f64, y1: f64) -> f64 {
    if x1 <= x0 || y1 <= y0 {
        return 0.0;
    }
    (disk_area_below(x0, x1, y1) - disk_area_below(x0, x1, y0)).max(0.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quad::{integrate_points, Tolerance};

    #[test]
    fn square_and_disk_areas() {
        assert_eq!(GrainShape::UnitSquare.area(), 1.0);
        assert_eq!(GrainShape::UnitDisk.area(), PI);
        assert!((unit_disk_rect_area(-2.0, 2.0, -2.0, 2.0) - PI).abs() < 1e-14);
    }

    #[test]
    fn section_lengths_integrate_to_area() {
        for shape in [GrainShape::UnitSquare, GrainShape::UnitDisk] {
            let mut f = |u: f64| shape.section_length(u);
            let r = integrate_points(&mut f, &shape.section_breaks(), Tolerance::abs(1e-12)).unwrap();
            assert!((r.value - shape.area()).abs() <= 1e-6 * shape.area(), "{}", r.value);
        }
    }

    #[test]
    fn disk_rect_matches_slice_quadrature() {
        let rects = [
            (-0.3, 0.8, -0.9, 0.2),
            (0.5, 3.0, -3.0, 0.1),
            (-1.5, -0.2, 0.4, 0.95),
            (0.0, 0.0001, -1.0, 1.0),
        ];
        for &(x0, x1, y0, y1) in &rects {
            let mut slice = |t: f64| {
                if t.abs() >= 1.0 {
                    return 0.0;
                }
                let s = (1.0 - t * t).sqrt();
                (s.min(y1) - (-s).max(y0)).max(0.0)
            };
            let mut pts = vec![x0, x1];
            for y in [y0, y1] {
                if y.abs() < 1.0 {
                    let c = (1.0 - y * y).sqrt();
                    pts.extend([c, -c]);
                }
            }
            pts.extend([-1.0, 1.0]);
            let mut pts: Vec<f64> = pts.into_iter().filter(|&p| p >= x0 && p <= x1).collect();
            pts.sort_by(f64::total_cmp);
            pts.dedup();
            let oracle = integrate_points(&mut slice, &pts, Tolerance::abs(1e-13)).unwrap().value;
            let exact = unit_disk_rect_area(x0, x1, y0, y1);
            assert!((oracle - exact).abs() < 1e-10, "{oracle} vs {exact}");
        }
    }

    #[test]
    fn lens_area_limits() {
        assert!((lens_area(0.0) - PI).abs() < 1e-14);
        assert_eq!(lens_area(2.0), 0.0);
        assert_eq!(GrainShape::UnitDisk.translate_overlap(1.5, 1.5), 0.0);
    }

    #[test]
    fn cross_overlap_reduces_to_square_integral() {
        for &(a, l) in &[(0.3, 1.0), (2.0, 1.0), (1.0, 1.0), (0.01, 5.0)] {
            let c = cross_overlap_integral(a, l, l);
            assert!((c - overlap_square_integral(a, l)).abs() < 1e-12);
        }
    }

    #[test]
    fn cross_overlap_matches_quadrature() {
        for &(a, l1, l2) in &[(0.3, 1.0, 2.0), (2.5, 1.0, 1.7), (0.7, 0.5, 0.6), (1.0, 3.0, 0.2)] {
            let mut g = |u: f64| interval_overlap(u, a, l1) * interval_overlap(u, a, l2);
            let mut pts = vec![-a, 0.0, l1 - a, l1, l2 - a, l2];
            pts.sort_by(f64::total_cmp);
            let q = integrate_points(&mut g, &pts, Tolerance::abs(1e-13)).unwrap().value;
            assert!((q - cross_overlap_integral(a, l1, l2)).abs() < 1e-11);
        }
    }

    #[test]
    fn disk_intersection_predicate() {
        let r = Rect::new(0.0, 1.0, 0.0, 1.0);
        // Ellipse centred near the corner but outside the diagonal reach.
        assert!(!GrainShape::UnitDisk.dilated_intersects(-0.8, -0.8, 1.0, 1.0, &r));
        assert!(GrainShape::UnitDisk.dilated_intersects(-0.6, -0.6, 1.0, 1.0, &r));
        assert!(GrainShape::UnitDisk.dilated_intersects(0.5, 0.5, 0.01, 0.01, &r));
    }

    #[test]
    fn custom_square_agrees_with_builtin() {
        let c = CustomGrain::new(
            |x, y| x > 0.0 && x <= 1.0 && y > 0.0 && y <= 1.0,
            Rect::new(0.0, 1.0, 0.0, 1.0),
            1.0,
            200,
        );
        let g = GrainShape::Custom(c);
        let r = Rect::new(0.0, 3.0, 0.0, 2.0);
        let a = g.dilated_overlap(-0.5, 1.0, 2.0, 4.0, &r);
        let b = GrainShape::UnitSquare.dilated_overlap(-0.5, 1.0, 2.0, 4.0, &r);
        assert!((a - b).abs() < 1e-2, "{a} {b}");
        assert!((g.translate_overlap(0.25, 0.5) - 0.375).abs() < 1e-2);
        assert!((g.section_length(0.5) - 1.0).abs() < 1e-2);
    }
}
