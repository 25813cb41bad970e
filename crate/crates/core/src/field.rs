//! Exact simulation of the grain field and of its window aggregates.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::geometry::{cross_overlap_integral, GrainShape, Rect};
use crate::parallel::try_replicate_map;
use crate::quad::{integrate_points, Tolerance};
use crate::sampling::{
    expected_proposals, gaussian_sample, grain_stream_rect, grain_stream_with, ExtendedWindow, SeededStream,
    StreamOptions, DEFAULT_GRAIN_CAP,
};
use crate::stats::{mean_se, product_mean_with_se};
use crate::theory::ModelParams;

pub use crate::sampling::GrainInstance;

/// `X(t, s)` at each point: the number of grains covering it.
pub fn evaluate_x(points: &[(f64, f64)], grains: &[GrainInstance], grain: &GrainShape) -> Vec<u32> {
    points
        .iter()
        .map(|&(t, s)| grains.iter().filter(|g| g.contains(grain, t, s)).count() as u32)
        .collect()
}

/// Treatment of grains too small to matter individually.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SmallGrains {
    /// Every grain is sampled.
    Exact,
    /// Grains with `R <= r_cut` are replaced by a Gaussian vector with their
    /// exact covariance over the grid, where `r_cut >= r_min` is the smallest
    /// radius keeping the expected number of sampled grains at most
    /// `target`. Square grains only.
    Gaussian { target: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimulationOptions {
    pub cap: u64,
    pub small_grains: SmallGrains,
}

impl Default for SimulationOptions {
    fn default() -> Self {
        SimulationOptions {
            cap: DEFAULT_GRAIN_CAP,
            small_grains: SmallGrains::Exact,
        }
    }
}

/// Normalization `lambda^{-h}`, optionally also `(log lambda)^{-1/2}`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Normalization {
    pub h: f64,
    pub log_correction: bool,
}

impl Normalization {
    pub fn factor(&self, lambda: f64) -> f64 {
        let f = lambda.powf(-self.h);
        if self.log_correction {
            f / lambda.ln().sqrt()
        } else {
            f
        }
    }
}

/// One realization of `S_{lambda,gamma}(x, y)` on a grid of `(x, y)`.
#[derive(Debug, Clone, PartialEq)]
pub struct AggregateSample {
    pub lambda: f64,
    pub gamma: f64,
    pub grid: Vec<(f64, f64)>,
    /// Centered values.
    pub values: Vec<f64>,
    pub normalization: Option<Normalization>,
    pub seed: u64,
    pub stream_id: u64,
}

impl AggregateSample {
    pub fn with_normalization(mut self, n: Normalization) -> Self {
        self.normalization = Some(n);
        self
    }

    /// Values times the normalization factor (raw values without one).
    pub fn normalized(&self) -> Vec<f64> {
        let f = self.normalization.map_or(1.0, |n| n.factor(self.lambda));
        self.values.iter().map(|v| v * f).collect()
    }
}

/// Precomputed plan for repeated realizations of `S` on a fixed grid.
#[derive(Debug, Clone)]
pub struct FieldSimulator {
    params: ModelParams,
    window: ExtendedWindow,
    grid: Vec<(f64, f64)>,
    rects: Vec<Rect>,
    cap: u64,
    r_cut: Option<f64>,
    /// Expected sampled contribution at each grid point.
    means: Vec<f64>,
    /// Cholesky factor of the small-grain covariance.
    small_factor: Option<DMatrix<f64>>,
}

impl FieldSimulator {
    /// `grid` holds the `(x, y)` points; the grain stream is built once for
    /// the smallest window containing all of them.
    pub fn new(
        params: &ModelParams,
        lambda: f64,
        gamma: f64,
        grid: &[(f64, f64)],
        options: SimulationOptions,
    ) -> Result<Self> {
        if params.p >= 1.0 {
            return Err(Error::POutOfRange {
                value: params.p,
                range: "(0,1)",
            });
        }
        if grid.is_empty() {
            return Err(Error::InvalidArgument("empty evaluation grid".into()));
        }
        let x_max = grid.iter().map(|g| g.0).fold(f64::NAN, f64::max);
        let y_max = grid.iter().map(|g| g.1).fold(f64::NAN, f64::max);
        let window = ExtendedWindow::new(lambda, gamma, x_max, y_max)?;
        let rects = grid
            .iter()
            .map(|&(x, y)| window.at(x, y).map(|w| w.rect()))
            .collect::<Result<Vec<_>>>()?;
        let r_cut = match options.small_grains {
            SmallGrains::Exact => None,
            SmallGrains::Gaussian { target } => {
                if params.grain != GrainShape::UnitSquare {
                    return Err(Error::Unsupported(
                        "Gaussian small-grain replacement needs square grains".into(),
                    ));
                }
                cutoff_for_target(&window, params, target)
            }
        };
        let area = params.grain.area();
        let means = rects
            .iter()
            .map(|r| {
                let m = r_cut.map_or(params.mean_r(), |c| params.partial_moment_above(1.0, c));
                r.area() * area * m
            })
            .collect();
        let small_factor = match r_cut {
            Some(c) => Some(small_grain_factor(params, &rects, c)?),
            None => None,
        };
        Ok(FieldSimulator {
            params: params.clone(),
            window,
            grid: grid.to_vec(),
            rects,
            cap: options.cap,
            r_cut,
            means,
            small_factor,
        })
    }

    /// Radius below which grains are replaced by the Gaussian part.
    pub fn r_cut(&self) -> Option<f64> {
        self.r_cut
    }

    pub fn expected_grains(&self) -> f64 {
        expected_proposals(&self.window, &self.params, self.r_cut)
    }

    pub fn sample(&self, stream: &mut SeededStream) -> Result<AggregateSample> {
        let (seed, stream_id) = (stream.seed(), stream.stream_id());
        let raw = self.overlap_sums(stream)?;
        let mut values: Vec<f64> = raw.iter().zip(&self.means).map(|(r, m)| r - m).collect();
        if let Some(l) = &self.small_factor {
            let z = DVector::from_iterator(l.nrows(), (0..l.nrows()).map(|_| gaussian_sample(0.0, 1.0, stream)));
            let add = l * z;
            for (v, a) in values.iter_mut().zip(add.iter()) {
                *v += a;
            }
        }
        Ok(AggregateSample {
            lambda: self.window.lambda,
            gamma: self.window.gamma,
            grid: self.grid.clone(),
            values,
            normalization: None,
            seed,
            stream_id,
        })
    }

    /// Raw (uncentered) sums of exact overlaps.
    pub fn sample_raw(&self, stream: &mut SeededStream) -> Result<Vec<f64>> {
        if self.r_cut.is_some() {
            return Err(Error::Unsupported("raw sums under small-grain replacement".into()));
        }
        self.overlap_sums(stream)
    }

    fn overlap_sums(&self, stream: &mut SeededStream) -> Result<Vec<f64>> {
        let mut raw = vec![0.0; self.grid.len()];
        let opts = StreamOptions {
            cap: self.cap,
            min_radius: self.r_cut,
        };
        let grain = &self.params.grain;
        for g in grain_stream_with(&self.window, &self.params, opts, stream)? {
            for (acc, rect) in raw.iter_mut().zip(&self.rects) {
                *acc += g.overlap(grain, rect);
            }
        }
        Ok(raw)
    }
}

/// Single realization at one `(x, y)`.
pub fn simulate_s(
    window: &ExtendedWindow,
    params: &ModelParams,
    options: SimulationOptions,
    stream: &mut SeededStream,
) -> Result<AggregateSample> {
    FieldSimulator::new(params, window.lambda, window.gamma, &[(window.x, window.y)], options)?.sample(stream)
}

/// Smallest cutoff `>= r_min` for which the expected number of sampled
/// grains is at most `target`; `None` when no cutoff is needed.
fn cutoff_for_target(window: &ExtendedWindow, params: &ModelParams, target: f64) -> Option<f64> {
    let count = |c: f64| expected_proposals(window, params, Some(c));
    if count(params.r_min) <= target {
        return None;
    }
    let (mut lo, mut hi) = (params.r_min, params.r_min * 2.0);
    while count(hi) > target {
        lo = hi;
        hi *= 2.0;
    }
    for _ in 0..100 {
        let m = 0.5 * (lo + hi);
        if count(m) > target {
            lo = m;
        } else {
            hi = m;
        }
    }
    Some(hi)
}

/// `Sigma_ij = int_{r_min}^{r_cut} f(r) C(r^p; a_i, a_j) C(r^{1-p}; b_i, b_j) dr`
/// with `C` the cross overlap integral of two windows sharing the origin.
pub fn small_grain_covariance(params: &ModelParams, rects: &[Rect], r_cut: f64) -> Result<DMatrix<f64>> {
    let n = rects.len();
    let p = params.p;
    let mut cov = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in i..n {
            let (a1, a2) = (rects[i].width(), rects[j].width());
            let (b1, b2) = (rects[i].height(), rects[j].height());
            let mut pts = vec![params.r_min, r_cut];
            for &l in &[a1, a2, (a1 - a2).abs()] {
                pts.push(l.powf(1.0 / p));
            }
            for &l in &[b1, b2, (b1 - b2).abs()] {
                pts.push(l.powf(1.0 / (1.0 - p)));
            }
            pts.retain(|&r| r >= params.r_min && r <= r_cut);
            pts.sort_by(f64::total_cmp);
            pts.dedup();
            let mut f = |r: f64| {
                params.density(r)
                    * cross_overlap_integral(r.powf(p), a1, a2)
                    * cross_overlap_integral(r.powf(1.0 - p), b1, b2)
            };
            let tol = Tolerance {
                abs: 0.0,
                rel: 1e-10,
                max_intervals: 4000,
            };
            let v = integrate_points(&mut f, &pts, tol)?.value;
            cov[(i, j)] = v;
            cov[(j, i)] = v;
        }
    }
    Ok(cov)
}

fn small_grain_factor(params: &ModelParams, rects: &[Rect], r_cut: f64) -> Result<DMatrix<f64>> {
    let cov = small_grain_covariance(params, rects, r_cut)?;
    cholesky_with_jitter(cov, 1e-8)
}

/// Lower Cholesky factor, adding diagonal jitter up to `max_jitter` times the
/// mean diagonal when the matrix is numerically singular.
pub fn cholesky_with_jitter(cov: DMatrix<f64>, max_jitter: f64) -> Result<DMatrix<f64>> {
    let n = cov.nrows();
    let scale = (0..n).map(|i| cov[(i, i)]).sum::<f64>() / n.max(1) as f64;
    let mut jitter = 0.0;
    loop {
        let mut m = cov.clone();
        for i in 0..n {
            m[(i, i)] += jitter;
        }
        if let Some(c) = m.cholesky() {
            return Ok(c.l());
        }
        jitter = if jitter == 0.0 { 1e-14 * scale } else { jitter * 10.0 };
        if jitter > max_jitter * scale {
            return Err(Error::CovarianceNotPsd { jitter });
        }
    }
}

/// `X(0, 0)` from independent realizations.
pub fn sample_point_values(params: &ModelParams, n: usize, seed: u64) -> Result<Vec<f64>> {
    let rect = Rect::new(-1e-9, 1e-9, -1e-9, 1e-9);
    try_replicate_map(n, |i| {
        let mut stream = SeededStream::new(seed, i as u64);
        let grains: Vec<GrainInstance> =
            grain_stream_rect(rect, params, StreamOptions::default(), &mut stream)?.collect();
        Ok(evaluate_x(&[(0.0, 0.0)], &grains, &params.grain)[0] as f64)
    })
}

/// Estimate of `rho(t, s)` with its standard error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LagEstimate {
    pub t: f64,
    pub s: f64,
    pub rho: f64,
    pub se: f64,
}

/// Covariance estimates from `n_points` independent realizations, each
/// evaluated at the origin and at every lag. The known mean
/// `leb(B) E R` is subtracted, which makes the estimator unbiased.
pub fn empirical_covariance(
    params: &ModelParams,
    lags: &[(f64, f64)],
    n_points: usize,
    seed: u64,
) -> Result<Vec<LagEstimate>> {
    if lags.is_empty() {
        return Ok(Vec::new());
    }
    let mut pts = vec![(0.0, 0.0)];
    pts.extend_from_slice(lags);
    let pad = 1e-9;
    let x0 = pts.iter().map(|p| p.0).fold(f64::INFINITY, f64::min) - pad;
    let x1 = pts.iter().map(|p| p.0).fold(f64::NEG_INFINITY, f64::max) + pad;
    let y0 = pts.iter().map(|p| p.1).fold(f64::INFINITY, f64::min) - pad;
    let y1 = pts.iter().map(|p| p.1).fold(f64::NEG_INFINITY, f64::max) + pad;
    let rect = Rect::new(x0, x1, y0, y1);
    let m = params.grain.area() * params.mean_r();
    let rows = try_replicate_map(n_points, |i| {
        let mut stream = SeededStream::new(seed, i as u64);
        let grains: Vec<GrainInstance> =
            grain_stream_rect(rect, params, StreamOptions::default(), &mut stream)?.collect();
        Ok::<_, Error>(
            evaluate_x(&pts, &grains, &params.grain)
                .into_iter()
                .map(|c| c as f64 - m)
                .collect::<Vec<_>>(),
        )
    })?;
    let base: Vec<f64> = rows.iter().map(|r| r[0]).collect();
    Ok(lags
        .iter()
        .enumerate()
        .map(|(k, &(t, s))| {
            let other: Vec<f64> = rows.iter().map(|r| r[k + 1]).collect();
            let (rho, se) = product_mean_with_se(&base, &other);
            LagEstimate { t, s, rho, se }
        })
        .collect())
}

/// Mean and standard error of a sample, for centering checks.
pub fn mean_with_se(values: &[f64]) -> (f64, f64) {
    (crate::stats::mean(values), mean_se(values))
}
