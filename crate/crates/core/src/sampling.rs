//! Random-number contract and exact samplers.

use std::f64::consts::FRAC_PI_2;

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp1, Poisson, StandardNormal};

use crate::error::{Error, Result};
use crate::geometry::{GrainShape, Rect};
use crate::theory::ModelParams;

/// Default cap on the number of grains proposed for one realization.
pub const DEFAULT_GRAIN_CAP: u64 = 100_000_000;

/// A reproducible random stream: `ChaCha8` keyed by `seed`, positioned on
/// the independent sub-stream `stream_id`.
#[derive(Debug, Clone)]
pub struct SeededStream {
    seed: u64,
    stream_id: u64,
    rng: ChaCha8Rng,
}

impl SeededStream {
    pub fn new(seed: u64, stream_id: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(stream_id);
        SeededStream { seed, stream_id, rng }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn stream_id(&self) -> u64 {
        self.stream_id
    }

    /// Uniform on `(0, 1]`.
    pub fn uniform_open0(&mut self) -> f64 {
        1.0 - self.rng.random::<f64>()
    }

    /// Uniform on `[lo, hi)`.
    pub fn uniform(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.rng.random::<f64>()
    }
}

impl RngCore for SeededStream {
    fn next_u32(&mut self) -> u32 {
        self.rng.next_u32()
    }

    fn next_u64(&mut self) -> u64 {
        self.rng.next_u64()
    }

    fn fill_bytes(&mut self, dst: &mut [u8]) {
        self.rng.fill_bytes(dst)
    }
}

/// The observation window `(0, lambda x] x (0, lambda^gamma y]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExtendedWindow {
    pub lambda: f64,
    pub gamma: f64,
    pub x: f64,
    pub y: f64,
}

impl ExtendedWindow {
    pub fn new(lambda: f64, gamma: f64, x: f64, y: f64) -> Result<Self> {
        for (name, v) in [("lambda", lambda), ("gamma", gamma), ("x", x), ("y", y)] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::InvalidArgument(format!(
                    "{name} must be positive and finite, got {v}"
                )));
            }
        }
        Ok(ExtendedWindow { lambda, gamma, x, y })
    }

    /// Horizontal side `lambda x`.
    pub fn width(&self) -> f64 {
        self.lambda * self.x
    }

    /// Vertical side `lambda^gamma y`.
    pub fn height(&self) -> f64 {
        self.lambda.powf(self.gamma) * self.y
    }

    pub fn area(&self) -> f64 {
        self.width() * self.height()
    }

    pub fn rect(&self) -> Rect {
        Rect::new(0.0, self.width(), 0.0, self.height())
    }

    /// The window for the grid point `(x, y)` at the same scale.
    pub fn at(&self, x: f64, y: f64) -> Result<Self> {
        ExtendedWindow::new(self.lambda, self.gamma, x, y)
    }
}

/// A dilated grain `(u, v) + diag(R^p, R^{1-p}) B`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GrainInstance {
    pub u: f64,
    pub v: f64,
    pub r: f64,
    /// `R^p`.
    pub sx: f64,
    /// `R^{1-p}`.
    pub sy: f64,
}

impl GrainInstance {
    pub fn new(u: f64, v: f64, r: f64, p: f64) -> Self {
        GrainInstance {
            u,
            v,
            r,
            sx: r.powf(p),
            sy: r.powf(1.0 - p),
        }
    }

    pub fn contains(&self, grain: &GrainShape, t: f64, s: f64) -> bool {
        grain.contains((t - self.u) / self.sx, (s - self.v) / self.sy)
    }

    pub fn overlap(&self, grain: &GrainShape, rect: &Rect) -> f64 {
        grain.dilated_overlap(self.u, self.v, self.sx, self.sy, rect)
    }
}

/// `R = r_min U^{-1/alpha}`.
pub fn pareto_sample(params: &ModelParams, stream: &mut SeededStream) -> f64 {
    pareto_from_uniform(params.r_min, params.alpha, stream.uniform_open0())
}

pub fn pareto_from_uniform(r_min: f64, index: f64, u: f64) -> f64 {
    r_min * u.powf(-1.0 / index)
}

/// Totally skewed (`beta = 1`) stable variate with
/// `log chf = -sigma^a |theta|^a (1 - i sgn(theta) tan(pi a / 2))`, by the
/// Chambers-Mallows-Stuck transform.
pub fn stable_sample(index: f64, sigma: f64, stream: &mut SeededStream) -> f64 {
    let v = stream.uniform(-FRAC_PI_2, FRAC_PI_2);
    let w: f64 = Exp1.sample(stream);
    sigma * cms(index, v, w)
}

fn cms(a: f64, v: f64, w: f64) -> f64 {
    let t = (std::f64::consts::PI * a / 2.0).tan();
    let b = t.atan() / a;
    let s = (1.0 + t * t).powf(1.0 / (2.0 * a));
    let av = a * (v + b);
    s * av.sin() / v.cos().powf(1.0 / a) * ((v - av).cos() / w).powf((1.0 - a) / a)
}

pub fn gaussian_sample(mean: f64, sd: f64, stream: &mut SeededStream) -> f64 {
    let z: f64 = StandardNormal.sample(stream);
    mean + sd * z
}

pub fn poisson_count(mean: f64, stream: &mut SeededStream) -> Result<u64> {
    if mean == 0.0 {
        return Ok(0);
    }
    let d = Poisson::new(mean).map_err(|e| Error::InvalidArgument(format!("poisson mean {mean}: {e}")))?;
    Ok(d.sample(stream) as u64)
}

/// Options of [`grain_stream_with`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StreamOptions {
    /// Maximal number of proposals.
    pub cap: u64,
    /// Only grains with `R > min_radius` are emitted (`r_min` keeps all).
    pub min_radius: Option<f64>,
}

impl Default for StreamOptions {
    fn default() -> Self {
        StreamOptions {
            cap: DEFAULT_GRAIN_CAP,
            min_radius: None,
        }
    }
}

/// Mixture of tilted Paretos for the radius of a grain whose base point is
/// uniform on the Minkowski-extended window.
#[derive(Debug, Clone)]
struct RadiusMixture {
    cumulative: [f64; 4],
    indices: [f64; 4],
    r_lo: f64,
    total: f64,
}

impl RadiusMixture {
    /// Base points of grains of radius `r` meeting the window fill
    /// `(-r^p x1, a - r^p x0) x (-r^{1-p} y1, b - r^{1-p} y0)`, of area
    /// `ab + a h r^{1-p} + b w r^p + w h r`.
    fn new(params: &ModelParams, rect: &Rect, r_lo: f64) -> Self {
        let (a, b) = (rect.width(), rect.height());
        let bb = params.grain.bounding_box();
        let (w, h) = (bb.width(), bb.height());
        let p = params.p;
        let m = |q: f64| params.partial_moment_above(q, r_lo);
        let weights = [a * b * m(0.0), a * h * m(1.0 - p), b * w * m(p), w * h * m(1.0)];
        let mut cumulative = [0.0; 4];
        let mut acc = 0.0;
        for (c, wt) in cumulative.iter_mut().zip(weights) {
            acc += wt;
            *c = acc;
        }
        let alpha = params.alpha;
        RadiusMixture {
            cumulative,
            indices: [alpha, alpha - 1.0 + p, alpha - p, alpha - 1.0],
            r_lo,
            total: acc,
        }
    }

    fn sample(&self, stream: &mut SeededStream) -> f64 {
        let pick = stream.uniform(0.0, self.total);
        let k = self.cumulative.iter().position(|&c| pick < c).unwrap_or(3);
        pareto_from_uniform(self.r_lo, self.indices[k], stream.uniform_open0())
    }
}

/// Exact Poisson sample of the grains meeting a window, emitted lazily.
pub struct GrainStream<'a> {
    grain: &'a GrainShape,
    p: f64,
    rect: Rect,
    bbox: Rect,
    mixture: RadiusMixture,
    remaining: u64,
    proposals: u64,
    stream: &'a mut SeededStream,
}

impl GrainStream<'_> {
    /// Number of proposals drawn for this realization.
    pub fn proposals(&self) -> u64 {
        self.proposals
    }

    /// Expected number of proposals.
    pub fn intensity(&self) -> f64 {
        self.mixture.total
    }
}

impl Iterator for GrainStream<'_> {
    type Item = GrainInstance;

    fn next(&mut self) -> Option<GrainInstance> {
        while self.remaining > 0 {
            self.remaining -= 1;
            let r = self.mixture.sample(self.stream);
            let g = GrainInstance::new(0.0, 0.0, r, self.p);
            let u = self
                .stream
                .uniform(self.rect.x0 - g.sx * self.bbox.x1, self.rect.x1 - g.sx * self.bbox.x0);
            let v = self
                .stream
                .uniform(self.rect.y0 - g.sy * self.bbox.y1, self.rect.y1 - g.sy * self.bbox.y0);
            let g = GrainInstance { u, v, ..g };
            let hit = match self.grain {
                GrainShape::UnitSquare => true,
                grain => grain.dilated_intersects(u, v, g.sx, g.sy, &self.rect),
            };
            if hit {
                return Some(g);
            }
        }
        None
    }
}

/// All grains whose dilated set meets the window.
pub fn grain_stream<'a>(
    window: &ExtendedWindow,
    params: &'a ModelParams,
    stream: &'a mut SeededStream,
) -> Result<GrainStream<'a>> {
    grain_stream_with(window, params, StreamOptions::default(), stream)
}

pub fn grain_stream_with<'a>(
    window: &ExtendedWindow,
    params: &'a ModelParams,
    options: StreamOptions,
    stream: &'a mut SeededStream,
) -> Result<GrainStream<'a>> {
    grain_stream_rect(window.rect(), params, options, stream)
}

/// All grains meeting an arbitrary axis-parallel rectangle.
pub fn grain_stream_rect<'a>(
    rect: Rect,
    params: &'a ModelParams,
    options: StreamOptions,
    stream: &'a mut SeededStream,
) -> Result<GrainStream<'a>> {
    if params.p >= 1.0 {
        return Err(Error::POutOfRange {
            value: params.p,
            range: "(0,1)",
        });
    }
    if !(rect.width() > 0.0 && rect.height() > 0.0) {
        return Err(Error::InvalidArgument(format!("degenerate window {rect:?}")));
    }
    let r_lo = options.min_radius.map_or(params.r_min, |r| r.max(params.r_min));
    let mixture = RadiusMixture::new(params, &rect, r_lo);
    let count = poisson_count(mixture.total, stream)?;
    if count > options.cap {
        return Err(Error::BudgetExceeded {
            count,
            cap: options.cap,
        });
    }
    Ok(GrainStream {
        grain: &params.grain,
        p: params.p,
        rect,
        bbox: params.grain.bounding_box(),
        mixture,
        remaining: count,
        proposals: count,
        stream,
    })
}

/// Expected number of proposals of [`grain_stream_with`].
pub fn expected_proposals(window: &ExtendedWindow, params: &ModelParams, min_radius: Option<f64>) -> f64 {
    let r_lo = min_radius.map_or(params.r_min, |r| r.max(params.r_min));
    RadiusMixture::new(params, &window.rect(), r_lo).total
}

/// Brute-force oracle: unit-intensity centers on the window padded by the
/// dilation of the `1 - tail` quantile of `R`, plain Pareto radii, and an
/// intersection test. Grains with radius beyond the quantile that would
/// reach the window from outside the padded box are missed; their expected
/// number is at most the padded intensity times `tail`.
pub fn naive_padded_grains(
    window: &ExtendedWindow,
    params: &ModelParams,
    tail: f64,
    cap: u64,
    stream: &mut SeededStream,
) -> Result<Vec<GrainInstance>> {
    let q = params.r_min * tail.powf(-1.0 / params.alpha);
    let bb = params.grain.bounding_box();
    let rect = window.rect();
    let (qx, qy) = (q.powf(params.p), q.powf(1.0 - params.p));
    let bx = Rect::new(-qx * bb.x1, rect.x1 - qx * bb.x0, -qy * bb.y1, rect.y1 - qy * bb.y0);
    let count = poisson_count(bx.area(), stream)?;
    if count > cap {
        return Err(Error::BudgetExceeded { count, cap });
    }
    let mut out = Vec::new();
    for _ in 0..count {
        let u = stream.uniform(bx.x0, bx.x1);
        let v = stream.uniform(bx.y0, bx.y1);
        let g = GrainInstance::new(u, v, pareto_sample(params, stream), params.p);
        if params.grain.dilated_intersects(g.u, g.v, g.sx, g.sy, &rect) {
            out.push(g);
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stats::{empirical_chf, mean, mean_se, theta_grid, variance};
    use crate::theory::chf::stable_log_chf;
    use crate::theory::Usage;

    #[test]
    fn pareto_quantiles() {
        assert_eq!(pareto_from_uniform(1.0, 1.5, 1.0), 1.0);
        assert!((pareto_from_uniform(1.0, 1.5, 0.25) - 0.25f64.powf(-2.0 / 3.0)).abs() < 1e-15);
        assert!((0.25f64.powf(-2.0 / 3.0) - 2.5198).abs() < 1e-4);
    }

    #[test]
    fn streams_are_reproducible_and_distinct() {
        let a: Vec<u64> = {
            let mut s = SeededStream::new(7, 3);
            (0..4).map(|_| s.next_u64()).collect()
        };
        let b: Vec<u64> = {
            let mut s = SeededStream::new(7, 3);
            (0..4).map(|_| s.next_u64()).collect()
        };
        let c: Vec<u64> = {
            let mut s = SeededStream::new(7, 4);
            (0..4).map(|_| s.next_u64()).collect()
        };
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn stable_mean_and_chf() {
        let mut s = SeededStream::new(11, 0);
        let n = 200_000;
        let xs: Vec<f64> = (0..n).map(|_| stable_sample(1.5, 1.0, &mut s)).collect();
        let thetas = theta_grid(2.0, 21);
        let emp = empirical_chf(&xs, &thetas);
        for (t, v) in thetas.iter().zip(&emp.values) {
            let exact = stable_log_chf(1.5, 1.0, *t).exp();
            assert!((v - exact).norm() < 0.01, "theta {t}: {v} vs {exact}");
        }
    }

    #[test]
    fn stable_scale_homogeneity() {
        let mut a = SeededStream::new(5, 1);
        let mut b = SeededStream::new(5, 1);
        for _ in 0..100 {
            let x = stable_sample(1.3, 2.0, &mut a);
            let y = stable_sample(1.3, 1.0, &mut b);
            assert!((x - 2.0 * y).abs() <= 1e-12 * x.abs().max(1.0));
        }
    }

    #[test]
    fn poisson_and_gaussian_moments() {
        let mut s = SeededStream::new(1, 2);
        assert_eq!(poisson_count(0.0, &mut s).unwrap(), 0);
        let xs: Vec<f64> = (0..100_000)
            .map(|_| poisson_count(7.0, &mut s).unwrap() as f64)
            .collect();
        assert!((mean(&xs) - 7.0).abs() < 3.0 * mean_se(&xs));
        assert!((variance(&xs) - 7.0).abs() < 0.15);
        let gs: Vec<f64> = (0..100_000).map(|_| gaussian_sample(2.0, 3.0, &mut s)).collect();
        assert!((mean(&gs) - 2.0).abs() < 3.0 * mean_se(&gs));
        assert!((variance(&gs) - 9.0).abs() < 0.15);
    }

    #[test]
    fn expected_count_reference() {
        let m = ModelParams::square(1.5, 0.5).unwrap();
        let w = ExtendedWindow::new(1.0, 1.0, 1.0, 1.0).unwrap();
        assert!((expected_proposals(&w, &m, None) - 7.0).abs() < 1e-12);
    }

    #[test]
    fn emitted_grains_meet_window() {
        let w = ExtendedWindow::new(3.0, 1.5, 1.0, 0.7).unwrap();
        for grain in [GrainShape::UnitSquare, GrainShape::UnitDisk] {
            let m = ModelParams::validate(1.6, 0.3, 1.0, grain.clone(), Usage::Field).unwrap();
            let mut s = SeededStream::new(9, 0);
            let rect = w.rect();
            for g in grain_stream(&w, &m, &mut s).unwrap() {
                assert!(g.overlap(&grain, &rect) > 0.0);
                assert!(g.r >= 1.0);
            }
        }
    }

    #[test]
    fn cap_is_enforced() {
        let m = ModelParams::square(1.5, 0.5).unwrap();
        let w = ExtendedWindow::new(100.0, 1.0, 1.0, 1.0).unwrap();
        let mut s = SeededStream::new(0, 0);
        let opts = StreamOptions {
            cap: 10,
            min_radius: None,
        };
        assert!(matches!(
            grain_stream_with(&w, &m, opts, &mut s),
            Err(Error::BudgetExceeded { cap: 10, .. })
        ));
    }

    #[test]
    fn disk_acceptance_rate() {
        let m = ModelParams::validate(1.5, 0.5, 1.0, GrainShape::UnitDisk, Usage::Field).unwrap();
        let w = ExtendedWindow::new(2.0, 1.0, 1.0, 1.0).unwrap();
        let (mut prop, mut acc) = (0u64, 0u64);
        for id in 0..2000 {
            let mut s = SeededStream::new(3, id);
            let mut it = grain_stream(&w, &m, &mut s).unwrap();
            acc += it.by_ref().count() as u64;
            prop += it.proposals();
        }
        let rate = acc as f64 / prop as f64;
        assert!(rate > 0.6 && rate < 1.0, "{rate}");
    }
}
