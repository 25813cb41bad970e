//! Reference samplers for the limit objects.
//!
//! Poisson integrals are split at a radius `epsilon`: jumps with `r >= epsilon`
//! are sampled exactly and compensated in closed form, the rest is replaced
//! by a Gaussian vector with its exact covariance.

use nalgebra::{DMatrix, SymmetricEigen};

use crate::error::{Error, Result};
use crate::field::cholesky_with_jitter;
use crate::geometry::{cross_overlap_integral, interval_overlap, GrainShape};
use crate::quad::{integrate_head, integrate_points, integrate_power_law, Tolerance};
use crate::sampling::{gaussian_sample, pareto_from_uniform, poisson_count, stable_sample, SeededStream};
use crate::theory::ModelParams;

/// Largest grid handled by exact covariance factorization.
pub const MAX_GRID_POINTS: usize = 4096;

/// Evaluation grid. In 1-D mode `ys` is `[1.0]`.
#[derive(Debug, Clone, PartialEq)]
pub struct GridSpec {
    pub xs: Vec<f64>,
    pub ys: Vec<f64>,
}

impl GridSpec {
    pub fn new(xs: Vec<f64>, ys: Vec<f64>) -> Result<Self> {
        for (name, g) in [("x", &xs), ("y", &ys)] {
            if g.is_empty() {
                return Err(Error::InvalidArgument(format!("empty {name}-grid")));
            }
            if g[0] <= 0.0 || g.windows(2).any(|w| !(w[1] > w[0])) || !g.iter().all(|v| v.is_finite()) {
                return Err(Error::InvalidArgument(format!(
                    "{name}-grid must be positive and strictly increasing"
                )));
            }
        }
        Ok(GridSpec { xs, ys })
    }

    pub fn one_d(xs: Vec<f64>) -> Result<Self> {
        GridSpec::new(xs, vec![1.0])
    }

    pub fn len(&self) -> usize {
        self.xs.len() * self.ys.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn increments(g: &[f64]) -> Vec<f64> {
        let mut prev = 0.0;
        g.iter()
            .map(|&v| {
                let d = v - prev;
                prev = v;
                d
            })
            .collect()
    }
}

/// Field values on a grid, indexed `[i * ys.len() + j]` for `(xs[i], ys[j])`.
#[derive(Debug, Clone, PartialEq)]
pub struct GridField {
    pub grid: GridSpec,
    pub values: Vec<f64>,
}

impl GridField {
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.grid.ys.len() + j]
    }

    /// `(x, y, value)` triples in storage order.
    pub fn points(&self) -> impl Iterator<Item = (f64, f64, f64)> + '_ {
        let ny = self.grid.ys.len();
        self.values
            .iter()
            .enumerate()
            .map(move |(k, &v)| (self.grid.xs[k / ny], self.grid.ys[k % ny], v))
    }
}

/// Cumulative sums over both axes of independent cell increments.
fn cumulate(nx: usize, ny: usize, mut cells: Vec<f64>) -> Vec<f64> {
    for i in 0..nx {
        for j in 1..ny {
            cells[i * ny + j] += cells[i * ny + j - 1];
        }
    }
    for i in 1..nx {
        for j in 0..ny {
            cells[i * ny + j] += cells[(i - 1) * ny + j];
        }
    }
    cells
}

/// The stable sheet `L_alpha` with `log E e^{i theta L(x, y)} =
/// -x y sigma_pow |theta|^alpha (1 - i sgn(theta) tan(pi alpha / 2))`, where
/// `sigma_pow = sigma^alpha`.
pub fn sample_levy_sheet(grid: &GridSpec, alpha: f64, sigma_pow: f64, stream: &mut SeededStream) -> Result<GridField> {
    check_index(alpha)?;
    let dx = GridSpec::increments(&grid.xs);
    let dy = GridSpec::increments(&grid.ys);
    let mut cells = Vec::with_capacity(grid.len());
    for &a in &dx {
        for &b in &dy {
            cells.push(stable_sample(alpha, (sigma_pow * a * b).powf(1.0 / alpha), stream));
        }
    }
    Ok(GridField {
        grid: grid.clone(),
        values: cumulate(dx.len(), dy.len(), cells),
    })
}

/// `x L(y)` for a stable Lévy process `L` with
/// `log E e^{i theta L(y)} = -y sigma_pow |theta|^a (...)`. With `along_y`
/// false the roles swap and the field is `y L(x)`.
pub fn sample_stable_line(
    index: f64,
    sigma_pow: f64,
    grid: &GridSpec,
    along_y: bool,
    stream: &mut SeededStream,
) -> Result<GridField> {
    check_index(index)?;
    let (time, slope) = if along_y {
        (&grid.ys, &grid.xs)
    } else {
        (&grid.xs, &grid.ys)
    };
    let mut path = Vec::with_capacity(time.len());
    let mut acc = 0.0;
    for d in GridSpec::increments(time) {
        acc += stable_sample(index, (sigma_pow * d).powf(1.0 / index), stream);
        path.push(acc);
    }
    let ny = grid.ys.len();
    let values = (0..grid.len())
        .map(|k| {
            let (i, j) = (k / ny, k % ny);
            if along_y {
                slope[i] * path[j]
            } else {
                slope[j] * path[i]
            }
        })
        .collect();
    Ok(GridField {
        grid: grid.clone(),
        values,
    })
}

fn check_index(a: f64) -> Result<()> {
    if !(a > 1.0 && a < 2.0) {
        return Err(Error::AlphaOutOfRange(a));
    }
    Ok(())
}

/// `(1/2)(s^{2H} + t^{2H} - |s - t|^{2H})`.
pub fn fbm_covariance(h: f64, s: f64, t: f64) -> f64 {
    0.5 * (s.powf(2.0 * h) + t.powf(2.0 * h) - (s - t).abs().powf(2.0 * h))
}

/// Covariance of `sqrt(variance) B_{H1,H2}` at two points.
pub fn fbs_covariance(h1: f64, h2: f64, variance: f64, a: (f64, f64), b: (f64, f64)) -> f64 {
    variance * fbm_covariance(h1, a.0, b.0) * fbm_covariance(h2, a.1, b.1)
}

/// A factor `L` with `L L^T = cov` for the fBm covariance on one axis. For
/// `H = 1` the covariance is the rank-one `s t`, factored exactly.
fn axis_factor(h: f64, pts: &[f64]) -> Result<DMatrix<f64>> {
    let n = pts.len();
    if h == 1.0 {
        return Ok(DMatrix::from_column_slice(n, 1, pts));
    }
    let cov = DMatrix::from_fn(n, n, |i, j| fbm_covariance(h, pts[i], pts[j]));
    match cholesky_with_jitter(cov.clone(), 1e-10) {
        Ok(l) => Ok(l),
        Err(_) => symmetric_factor(cov, 1e-10),
    }
}

/// `V diag(sqrt(max(lambda, 0)))` from the symmetric eigendecomposition;
/// negative eigenvalues beyond `tol` times the largest are an error.
fn symmetric_factor(cov: DMatrix<f64>, tol: f64) -> Result<DMatrix<f64>> {
    let eig = SymmetricEigen::new(cov);
    let top = eig.eigenvalues.iter().cloned().fold(0.0, f64::max);
    let low = eig.eigenvalues.iter().cloned().fold(f64::INFINITY, f64::min);
    if low < -tol * top {
        return Err(Error::CovarianceNotPsd { jitter: -low });
    }
    let mut l = eig.eigenvectors;
    for (k, &lam) in eig.eigenvalues.iter().enumerate() {
        let s = lam.max(0.0).sqrt();
        l.column_mut(k).scale_mut(s);
    }
    Ok(l)
}

/// Precomputed factorization for repeated fractional Brownian sheet draws.
#[derive(Debug, Clone)]
pub struct FbsSampler {
    grid: GridSpec,
    lx: DMatrix<f64>,
    ly: DMatrix<f64>,
    scale: f64,
}

impl FbsSampler {
    pub fn new(grid: &GridSpec, h1: f64, h2: f64, variance: f64) -> Result<Self> {
        for h in [h1, h2] {
            if !(h > 0.0 && h <= 1.0) {
                return Err(Error::InvalidArgument(format!("Hurst index {h} outside (0,1]")));
            }
        }
        if grid.len() > MAX_GRID_POINTS {
            return Err(Error::InvalidArgument(format!(
                "{} grid points exceed the limit {MAX_GRID_POINTS}",
                grid.len()
            )));
        }
        if !(variance >= 0.0) {
            return Err(Error::InvalidArgument(format!("negative variance {variance}")));
        }
        Ok(FbsSampler {
            grid: grid.clone(),
            lx: axis_factor(h1, &grid.xs)?,
            ly: axis_factor(h2, &grid.ys)?,
            scale: variance.sqrt(),
        })
    }

    /// The product covariance is `Cx ⊗ Cy`, so `Lx W Ly^T` with white `W`
    /// has the right law.
    pub fn sample(&self, stream: &mut SeededStream) -> GridField {
        let w = DMatrix::from_fn(self.lx.ncols(), self.ly.ncols(), |_, _| {
            gaussian_sample(0.0, 1.0, stream)
        });
        let z = &self.lx * w * self.ly.transpose() * self.scale;
        let (nx, ny) = (self.grid.xs.len(), self.grid.ys.len());
        let values = (0..nx * ny).map(|k| z[(k / ny, k % ny)]).collect();
        GridField {
            grid: self.grid.clone(),
            values,
        }
    }
}

/// One draw of `sqrt(variance) B_{H1,H2}` on the grid.
pub fn sample_fbs(grid: &GridSpec, h1: f64, h2: f64, variance: f64, stream: &mut SeededStream) -> Result<GridField> {
    Ok(FbsSampler::new(grid, h1, h2, variance)?.sample(stream))
}

/// Truncation settings of the Poisson-integral samplers.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TruncationOptions {
    /// Split radius; chosen from `target_points` when absent.
    pub epsilon: Option<f64>,
    /// Jumps with `r > r_max` are dropped when set.
    pub r_max: Option<f64>,
    /// Expected number of exact jumps per draw used to pick `epsilon`.
    pub target_points: f64,
    /// Upper limit on the expected number of exact jumps.
    pub max_points: f64,
    /// Budget for the variance (or first absolute moment when the variance
    /// is infinite) discarded by `r_max`.
    pub tolerance: f64,
}

impl Default for TruncationOptions {
    fn default() -> Self {
        TruncationOptions {
            epsilon: None,
            r_max: None,
            target_points: 2000.0,
            max_points: 1e7,
            tolerance: 1e-3,
        }
    }
}

/// Solves `count(eps) = target` for a decreasing `count`.
fn epsilon_for_target<F: Fn(f64) -> f64>(count: F, target: f64) -> f64 {
    let (mut lo, mut hi) = (1.0, 1.0);
    while count(lo) < target {
        lo *= 0.5;
    }
    while count(hi) > target {
        hi *= 2.0;
    }
    for _ in 0..100 {
        let m = (lo * hi).sqrt();
        if count(m) > target {
            lo = m;
        } else {
            hi = m;
        }
    }
    hi
}

fn resolve_epsilon<F: Fn(f64) -> f64>(opts: &TruncationOptions, count: F) -> Result<f64> {
    let eps = match opts.epsilon {
        Some(e) if e > 0.0 => e,
        Some(e) => return Err(Error::InvalidArgument(format!("epsilon must be positive, got {e}"))),
        None => epsilon_for_target(&count, opts.target_points),
    };
    if let Some(r) = opts.r_max {
        if !(r > eps) {
            return Err(Error::InvalidArgument(format!(
                "need epsilon < r_max, got {eps} >= {r}"
            )));
        }
    }
    let n = count(eps);
    if n > opts.max_points {
        return Err(Error::TruncationBudgetExceeded(format!(
            "epsilon {eps} needs {n:.3e} expected jumps, above {:.3e}",
            opts.max_points
        )));
    }
    Ok(eps)
}

/// `int K_1(u) K_2(u) du` with `K_i(u) = a (cdf((x_i - u) / a) - cdf(-u / a))`.
fn kernel_cross(grain: &GrainShape, a: f64, x1: f64, x2: f64) -> Result<f64> {
    if let GrainShape::UnitSquare = grain {
        return Ok(cross_overlap_integral(a, x1, x2));
    }
    let bb = grain.bounding_box();
    let k = |x: f64, u: f64| a * (grain.section_cdf((x - u) / a) - grain.section_cdf(-u / a));
    let mut f = |u: f64| k(x1, u) * k(x2, u);
    let hi = x1.max(x2);
    let mut pts = vec![
        -a * bb.x1,
        -a * bb.x0,
        x1 - a * bb.x1,
        x1 - a * bb.x0,
        x2 - a * bb.x1,
        x2 - a * bb.x0,
    ];
    pts.retain(|&u| u >= -a * bb.x1 && u <= hi - a * bb.x0);
    pts.sort_by(f64::total_cmp);
    pts.dedup();
    Ok(integrate_points(&mut f, &pts, Tolerance::rel(1e-10).with_abs(1e-300))?.value)
}

/// Which intermediate field.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum IntermediateSide {
    Plus,
    Minus,
}

/// Precomputed plan for the intermediate Poisson fields `I_+` and `I_-`.
#[derive(Debug, Clone)]
pub struct IntermediateSampler {
    side: IntermediateSide,
    /// Parameters of the `I_+` representation (reflected for `I_-`).
    params: ModelParams,
    /// Grid of the `I_+` representation.
    xs: Vec<f64>,
    ys: Vec<f64>,
    out_grid: GridSpec,
    epsilon: f64,
    r_max: Option<f64>,
    weights: [f64; 2],
    /// Cholesky factor of the small-jump covariance per unit of `y`.
    small: DMatrix<f64>,
}

impl IntermediateSampler {
    pub fn new(side: IntermediateSide, grid: &GridSpec, params: &ModelParams, opts: TruncationOptions) -> Result<Self> {
        let (a, p) = (params.alpha, params.p);
        if !(p > 0.0 && p < 1.0) {
            return Err(Error::POutOfRange {
                value: p,
                range: "(0,1)",
            });
        }
        if grid.xs.len() > MAX_GRID_POINTS {
            return Err(Error::InvalidArgument("grid too large".into()));
        }
        let (pp, xs, ys) = match side {
            IntermediateSide::Plus => (params.clone(), grid.xs.clone(), grid.ys.clone()),
            IntermediateSide::Minus => (params.reflected()?, grid.ys.clone(), grid.xs.clone()),
        };
        let (a, p) = match side {
            IntermediateSide::Plus => (a, p),
            IntermediateSide::Minus => (pp.alpha, pp.p),
        };
        let cf = pp.c_f();
        let x_max = *xs.last().unwrap();
        let y_max = *ys.last().unwrap();
        let w = pp.grain.bounding_box().width();
        let weights_at = |eps: f64| {
            [
                cf * y_max * x_max * eps.powf(-a) / a,
                cf * y_max * w * eps.powf(p - a) / (a - p),
            ]
        };
        let epsilon = resolve_epsilon(&opts, |e| weights_at(e).iter().sum())?;
        if let Some(r_max) = opts.r_max {
            let dropped = dropped_plus_moment(&pp, x_max, y_max, r_max)?;
            if dropped > opts.tolerance {
                return Err(Error::TruncationBudgetExceeded(format!(
                    "r_max {r_max} discards {dropped:.3e}, above tolerance {:.3e}",
                    opts.tolerance
                )));
            }
        }
        let n = xs.len();
        let grain = pp.grain.clone();
        let mut cov = DMatrix::zeros(n, n);
        for i in 0..n {
            for j in i..n {
                let (x1, x2) = (xs[i], xs[j]);
                let mut failure = None;
                let mut f = |r: f64| {
                    let rp = r.powf(p);
                    match kernel_cross(&grain, rp, x1, x2) {
                        Ok(k) if rp > 0.0 => r.powf(1.0 - a) * (k / (rp * rp)),
                        Ok(_) => 0.0,
                        Err(e) => {
                            failure.get_or_insert(e);
                            0.0
                        }
                    }
                };
                let mut breaks: Vec<f64> = [x1, x2, (x2 - x1).abs()].iter().map(|v| v.powf(1.0 / p)).collect();
                breaks.retain(|&b| b > 0.0);
                let v = integrate_head(&mut f, 1.0 - a, epsilon, &breaks, Tolerance::rel(1e-9).with_abs(1e-300))?.value;
                if let Some(e) = failure {
                    return Err(e);
                }
                cov[(i, j)] = cf * v;
                cov[(j, i)] = cf * v;
            }
        }
        let small = cholesky_with_jitter(cov, 1e-10)?;
        Ok(IntermediateSampler {
            side,
            params: pp,
            xs,
            ys,
            out_grid: grid.clone(),
            epsilon,
            r_max: opts.r_max,
            weights: weights_at(epsilon),
            small,
        })
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn expected_points(&self) -> f64 {
        self.weights.iter().sum()
    }

    pub fn sample(&self, stream: &mut SeededStream) -> Result<GridField> {
        let (a, p, cf) = (self.params.alpha, self.params.p, self.params.c_f());
        let grain = &self.params.grain;
        let bb = grain.bounding_box();
        let (nx, ny) = (self.xs.len(), self.ys.len());
        let x_max = self.xs[nx - 1];
        let y_max = self.ys[ny - 1];
        // Cell sums indexed by [i * ny + j], later cumulated over j.
        let mut cells = vec![0.0; nx * ny];
        let total = self.expected_points();
        let count = poisson_count(total, stream)?;
        for _ in 0..count {
            let pick = stream.uniform(0.0, total);
            let index = if pick < self.weights[0] { a } else { a - p };
            let r = pareto_from_uniform(self.epsilon, index, stream.uniform_open0());
            let rp = r.powf(p);
            let u = stream.uniform(-rp * bb.x1, x_max - rp * bb.x0);
            let v = stream.uniform(0.0, y_max);
            if self.r_max.is_some_and(|m| r > m) {
                continue;
            }
            let j = self.ys.partition_point(|&y| y < v);
            let h = r.powf(1.0 - p);
            for (i, &x) in self.xs.iter().enumerate() {
                let k = match grain {
                    GrainShape::UnitSquare => interval_overlap(u, rp, x),
                    g => rp * (g.section_cdf((x - u) / rp) - g.section_cdf(-u / rp)),
                };
                cells[i * ny + j] += h * k;
            }
        }
        let dy = GridSpec::increments(&self.ys);
        let area = grain.area();
        // Compensator of the jumps above epsilon, per unit x and y.
        let mut comp_rate = area * cf * self.epsilon.powf(1.0 - a) / (a - 1.0);
        if let Some(m) = self.r_max {
            comp_rate -= area * cf * m.powf(1.0 - a) / (a - 1.0);
        }
        for (j, &d) in dy.iter().enumerate() {
            let z = nalgebra::DVector::from_fn(self.small.ncols(), |_, _| gaussian_sample(0.0, 1.0, stream));
            let g = &self.small * z * d.sqrt();
            for (i, &x) in self.xs.iter().enumerate() {
                cells[i * ny + j] += g[i] - comp_rate * x * d;
            }
        }
        for i in 0..nx {
            for j in 1..ny {
                cells[i * ny + j] += cells[i * ny + j - 1];
            }
        }
        let values = match self.side {
            IntermediateSide::Plus => cells,
            IntermediateSide::Minus => {
                // Stored as I_+ of the reflection on (y, x); transpose back.
                let (ox, oy) = (self.out_grid.xs.len(), self.out_grid.ys.len());
                (0..ox * oy).map(|k| cells[(k % oy) * ny + k / oy]).collect()
            }
        };
        Ok(GridField {
            grid: self.out_grid.clone(),
            values,
        })
    }
}

/// Variance (or, when infinite, first absolute moment bound) of the part of
/// `I_+(x, y)` carried by jumps with `r > r_max`.
fn dropped_plus_moment(params: &ModelParams, x: f64, y: f64, r_max: f64) -> Result<f64> {
    let (a, p, cf) = (params.alpha, params.p, params.c_f());
    if a > 2.0 - p {
        let grain = params.grain.clone();
        let mut failure = None;
        let mut f = |r: f64| match kernel_cross(&grain, r.powf(p), x, x) {
            Ok(k) => r.powf(2.0 - 2.0 * p) * k * r.powf(-1.0 - a),
            Err(e) => {
                failure.get_or_insert(e);
                0.0
            }
        };
        let v = crate::quad::integrate_tail(&mut f, r_max, a + p - 2.0, &[], Tolerance::rel(1e-8).with_abs(1e-300))?;
        if let Some(e) = failure {
            return Err(e);
        }
        Ok(cf * y * v.value)
    } else {
        // Twice the compensator of the dropped jumps bounds E|.|.
        Ok(2.0 * cf * y * x * params.grain.area() * r_max.powf(1.0 - a) / (a - 1.0))
    }
}

/// One draw of `I_+` or `I_-` on the grid.
pub fn sample_intermediate_field(
    side: IntermediateSide,
    grid: &GridSpec,
    params: &ModelParams,
    opts: TruncationOptions,
    stream: &mut SeededStream,
) -> Result<GridField> {
    IntermediateSampler::new(side, grid, params, opts)?.sample(stream)
}

/// Workload limit processes of the intermediate families.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WorkloadLimit {
    /// `I(x) = int leb((u, u + r^p) ∩ (0, x)) M~(du, dr)`.
    I,
    /// `I^(x)`: as `I` with the weight `r^{1-p} ∧ 1`.
    IHat,
    /// `Z^(x)`: Gaussian process with the covariance of `I^`.
    ZHatProcess,
    /// `L^(x)`: Lévy process with jumps `(r^{1-p} ∧ 1) r^p`.
    LHat,
    /// `x Z^` for the random slope `Z^`.
    ZHatSlope,
    /// `I_+(x, 1)` on the square.
    IPlus,
}

fn weight(kind: WorkloadLimit, r: f64, p: f64) -> f64 {
    match kind {
        WorkloadLimit::I => 1.0,
        _ => r.powf(1.0 - p).min(1.0),
    }
}

/// `c_f int_0^{eps} w(r)^2 C(r^p; x1, x2) r^{-1-alpha} dr` (or over all `r`
/// when `eps` is infinite).
fn process_covariance(kind: WorkloadLimit, params: &ModelParams, x1: f64, x2: f64, eps: f64) -> Result<f64> {
    let (a, p, cf) = (params.alpha, params.p, params.c_f());
    let f = |r: f64| {
        let w = weight(kind, r, p);
        let rp = r.powf(p);
        if rp == 0.0 {
            return 0.0;
        }
        w * w * r.powf(2.0 * p - 1.0 - a) * (cross_overlap_integral(rp, x1, x2) / (rp * rp))
    };
    let lower = match kind {
        WorkloadLimit::I => 2.0 * p - 1.0 - a,
        _ => 1.0 - a,
    };
    let mut breaks: Vec<f64> = [x1, x2, (x2 - x1).abs()].iter().map(|v| v.powf(1.0 / p)).collect();
    breaks.push(1.0);
    breaks.retain(|&b| b > 0.0);
    let tol = Tolerance::rel(1e-9).with_abs(1e-300);
    let v = if eps.is_finite() {
        let mut f = f;
        integrate_head(&mut f, lower, eps, &breaks, tol)?.value
    } else {
        integrate_power_law(f, lower, a - p, 1.0, &breaks, tol)?.value
    };
    Ok(cf * v)
}

/// Precomputed plan for the workload limit paths on an `x`-grid.
#[derive(Debug, Clone)]
pub struct WorkloadLimitSampler {
    kind: WorkloadLimit,
    params: ModelParams,
    xs: Vec<f64>,
    epsilon: f64,
    expected: f64,
    small: DMatrix<f64>,
    plus: Option<IntermediateSampler>,
}

impl WorkloadLimitSampler {
    pub fn new(kind: WorkloadLimit, xs: &[f64], params: &ModelParams, opts: TruncationOptions) -> Result<Self> {
        let grid = GridSpec::one_d(xs.to_vec())?;
        let (a, p, cf) = (params.alpha, params.p, params.c_f());
        if params.grain != GrainShape::UnitSquare {
            return Err(Error::Unsupported(
                "workload limits are defined for the unit square".into(),
            ));
        }
        let mismatch = |what: &str| {
            Err(Error::RegimeMismatch(format!(
                "{kind:?} needs {what}; got alpha={a}, p={p}"
            )))
        };
        match kind {
            WorkloadLimit::I if !(a < 2.0 * p && p > 0.5) => return mismatch("1 < alpha < 2p, 1/2 < p <= 1"),
            WorkloadLimit::ZHatSlope if !(a < 2.0 - p) => return mismatch("alpha < 2 - p"),
            WorkloadLimit::IPlus if p >= 1.0 => return mismatch("p < 1"),
            _ => {}
        }
        if kind == WorkloadLimit::IPlus {
            let plus = IntermediateSampler::new(IntermediateSide::Plus, &grid, params, opts)?;
            return Ok(WorkloadLimitSampler {
                kind,
                params: params.clone(),
                xs: xs.to_vec(),
                epsilon: plus.epsilon(),
                expected: plus.expected_points(),
                small: DMatrix::zeros(0, 0),
                plus: Some(plus),
            });
        }
        let x_max = *xs.last().unwrap();
        let count = |e: f64| -> f64 {
            match kind {
                WorkloadLimit::I | WorkloadLimit::IHat => cf * (x_max * e.powf(-a) / a + e.powf(p - a) / (a - p)),
                WorkloadLimit::LHat => cf * x_max * e.powf(-a) / a,
                WorkloadLimit::ZHatSlope => cf * e.powf(p - a) / (a - p),
                _ => 0.0,
            }
        };
        let n = xs.len();
        if kind == WorkloadLimit::ZHatProcess {
            let mut cov = DMatrix::zeros(n, n);
            for i in 0..n {
                for j in i..n {
                    let v = process_covariance(kind, params, xs[i], xs[j], f64::INFINITY)?;
                    cov[(i, j)] = v;
                    cov[(j, i)] = v;
                }
            }
            return Ok(WorkloadLimitSampler {
                kind,
                params: params.clone(),
                xs: xs.to_vec(),
                epsilon: f64::INFINITY,
                expected: 0.0,
                small: cholesky_with_jitter(cov, 1e-10)?,
                plus: None,
            });
        }
        let epsilon = resolve_epsilon(&opts, count)?;
        let small = match kind {
            WorkloadLimit::I | WorkloadLimit::IHat => {
                let mut cov = DMatrix::zeros(n, n);
                for i in 0..n {
                    for j in i..n {
                        let v = process_covariance(kind, params, xs[i], xs[j], epsilon)?;
                        cov[(i, j)] = v;
                        cov[(j, i)] = v;
                    }
                }
                cholesky_with_jitter(cov, 1e-10)?
            }
            // Per unit time for the Lévy process, and for the slope.
            WorkloadLimit::LHat => DMatrix::from_element(1, 1, levy_hat_small_variance(a, p, cf, epsilon)?.sqrt()),
            _ => {
                let e1 = epsilon.min(1.0);
                let mut v = cf * e1.powf(2.0 - p - a) / (2.0 - p - a);
                if epsilon > 1.0 {
                    v += cf * (epsilon.powf(p - a) - 1.0) / (p - a);
                }
                DMatrix::from_element(1, 1, v.sqrt())
            }
        };
        Ok(WorkloadLimitSampler {
            kind,
            params: params.clone(),
            xs: xs.to_vec(),
            epsilon,
            expected: count(epsilon),
            small,
            plus: None,
        })
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn expected_points(&self) -> f64 {
        self.expected
    }

    pub fn sample(&self, stream: &mut SeededStream) -> Result<Vec<f64>> {
        let (a, p, cf) = (self.params.alpha, self.params.p, self.params.c_f());
        let eps = self.epsilon;
        let n = self.xs.len();
        match self.kind {
            WorkloadLimit::IPlus => Ok(self.plus.as_ref().unwrap().sample(stream)?.values),
            WorkloadLimit::ZHatProcess => {
                let z = nalgebra::DVector::from_fn(n, |_, _| gaussian_sample(0.0, 1.0, stream));
                Ok((&self.small * z).iter().copied().collect())
            }
            WorkloadLimit::I | WorkloadLimit::IHat => {
                let x_max = self.xs[n - 1];
                let w0 = cf * x_max * eps.powf(-a) / a;
                let total = self.expected;
                let mut out = vec![0.0; n];
                for _ in 0..poisson_count(total, stream)? {
                    let index = if stream.uniform(0.0, total) < w0 { a } else { a - p };
                    let r = pareto_from_uniform(eps, index, stream.uniform_open0());
                    let rp = r.powf(p);
                    let u = stream.uniform(-rp, x_max);
                    let w = weight(self.kind, r, p);
                    for (o, &x) in out.iter_mut().zip(&self.xs) {
                        *o += w * interval_overlap(u, rp, x);
                    }
                }
                let comp = compensator_rate(self.kind, a, p, cf, eps);
                let z = nalgebra::DVector::from_fn(n, |_, _| gaussian_sample(0.0, 1.0, stream));
                let g = &self.small * z;
                for ((o, &x), gi) in out.iter_mut().zip(&self.xs).zip(g.iter()) {
                    *o += gi - comp * x;
                }
                Ok(out)
            }
            WorkloadLimit::LHat => {
                let comp = compensator_rate(self.kind, a, p, cf, eps);
                let sd = self.small[(0, 0)];
                let mut acc = 0.0;
                let mut out = Vec::with_capacity(n);
                for d in GridSpec::increments(&self.xs) {
                    let mut inc = 0.0;
                    for _ in 0..poisson_count(cf * d * eps.powf(-a) / a, stream)? {
                        let r = pareto_from_uniform(eps, a, stream.uniform_open0());
                        inc += r.powf(1.0 - p).min(1.0) * r.powf(p);
                    }
                    acc += inc - comp * d + gaussian_sample(0.0, sd * d.sqrt(), stream);
                    out.push(acc);
                }
                Ok(out)
            }
            WorkloadLimit::ZHatSlope => {
                let mut z = 0.0;
                for _ in 0..poisson_count(self.expected, stream)? {
                    let r = pareto_from_uniform(eps, a - p, stream.uniform_open0());
                    z += r.powf(1.0 - p).min(1.0);
                }
                z -= compensator_rate(self.kind, a, p, cf, eps);
                z += gaussian_sample(0.0, self.small[(0, 0)], stream);
                Ok(self.xs.iter().map(|x| x * z).collect())
            }
        }
    }
}

/// `c_f int_eps^inf (jump size) (intensity)` per unit `x`.
fn compensator_rate(kind: WorkloadLimit, a: f64, p: f64, cf: f64, eps: f64) -> f64 {
    // int_eps^inf (r^{1-p} ∧ 1) r^{q} dr for the exponents below.
    let capped = |q: f64| -> f64 {
        // r^{1-p} r^q below 1 and r^q above.
        let e1 = eps.min(1.0);
        let mut v = 0.0;
        if eps < 1.0 {
            v += (1.0 - e1.powf(2.0 - p + q)) / (2.0 - p + q);
        }
        v + eps.max(1.0).powf(1.0 + q) / -(1.0 + q)
    };
    match kind {
        WorkloadLimit::I => cf * eps.powf(p - a) / (a - p),
        WorkloadLimit::IHat | WorkloadLimit::LHat => cf * capped(p - 1.0 - a),
        WorkloadLimit::ZHatSlope => cf * capped(p - 1.0 - a),
        _ => 0.0,
    }
}

/// `c_f int_0^eps ((r^{1-p} ∧ 1) r^p)^2 r^{-1-alpha} dr`.
fn levy_hat_small_variance(a: f64, p: f64, cf: f64, eps: f64) -> Result<f64> {
    let e1 = eps.min(1.0);
    let mut v = e1.powf(2.0 - a) / (2.0 - a);
    if eps > 1.0 {
        v += (eps.powf(2.0 * p - a) - 1.0) / (2.0 * p - a);
    }
    if !v.is_finite() {
        return Err(Error::InvalidArgument(format!(
            "small-jump variance diverges at epsilon {eps}"
        )));
    }
    Ok(cf * v)
}

/// One path of a workload limit process on the `x`-grid.
pub fn sample_workload_limits(
    kind: WorkloadLimit,
    xs: &[f64],
    params: &ModelParams,
    opts: TruncationOptions,
    stream: &mut SeededStream,
) -> Result<Vec<f64>> {
    WorkloadLimitSampler::new(kind, xs, params, opts)?.sample(stream)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stats::{covariance_with_se, empirical_chf, mean, mean_se, theta_grid, variance};
    use crate::theory::chf::{intermediate_plus_log_chf, stable_log_chf};
    use crate::theory::{sigma_alpha, sigma_plus_sq, Usage};

    #[test]
    fn grid_validation() {
        assert!(GridSpec::new(vec![1.0, 1.0], vec![1.0]).is_err());
        assert!(GridSpec::new(vec![0.0, 1.0], vec![1.0]).is_err());
        assert!(GridSpec::one_d(vec![0.5, 1.0]).is_ok());
    }

    #[test]
    fn brownian_sheet_special_case() {
        for &(a, b) in &[((0.3, 0.7), (0.9, 0.2)), ((1.0, 1.0), (1.0, 1.0))] {
            let c = fbs_covariance(0.5, 0.5, 1.0, a, b);
            assert!((c - a.0.min(b.0) * a.1.min(b.1)).abs() < 1e-15);
        }
    }

    #[test]
    fn hurst_one_is_linear() {
        let grid = GridSpec::new(vec![0.5, 1.0, 2.0, 3.5], vec![0.25, 1.0]).unwrap();
        let f = sample_fbs(&grid, 1.0, 0.5, 2.0, &mut SeededStream::new(1, 1)).unwrap();
        for j in 0..2 {
            for i in 0..4 {
                let lin = grid.xs[i] * f.get(1, j);
                assert!((f.get(i, j) - lin).abs() < 1e-12 * lin.abs().max(1.0));
            }
        }
    }

    #[test]
    fn fbs_covariance_monte_carlo() {
        let grid = GridSpec::new(vec![0.5, 1.0], vec![0.5, 1.0]).unwrap();
        let s = FbsSampler::new(&grid, 0.7, 0.5, 3.0).unwrap();
        let draws: Vec<GridField> = (0..10_000).map(|i| s.sample(&mut SeededStream::new(2, i))).collect();
        for &(k1, k2) in &[(0, 3), (1, 2), (3, 3), (0, 0)] {
            let a: Vec<f64> = draws.iter().map(|d| d.values[k1]).collect();
            let b: Vec<f64> = draws.iter().map(|d| d.values[k2]).collect();
            let (c, se) = covariance_with_se(&a, &b);
            let pa = (grid.xs[k1 / 2], grid.ys[k1 % 2]);
            let pb = (grid.xs[k2 / 2], grid.ys[k2 % 2]);
            let exact = fbs_covariance(0.7, 0.5, 3.0, pa, pb);
            assert!((c - exact).abs() < 4.0 * se, "{k1},{k2}: {c} vs {exact} ({se})");
        }
    }

    #[test]
    fn levy_sheet_marginal() {
        let m = ModelParams::square(1.5, 0.5).unwrap();
        let s = sigma_alpha(&m);
        let grid = GridSpec::new(vec![0.5, 1.0], vec![1.0, 2.0]).unwrap();
        let vals: Vec<f64> = (0..40_000)
            .map(|i| {
                sample_levy_sheet(&grid, 1.5, s, &mut SeededStream::new(3, i))
                    .unwrap()
                    .get(1, 1)
            })
            .collect();
        let thetas = theta_grid(1.0, 11);
        let emp = empirical_chf(&vals, &thetas);
        for (t, v) in thetas.iter().zip(&emp.values) {
            let exact = stable_log_chf(1.5, s * 2.0, *t).exp();
            assert!((v - exact).norm() < 0.02, "{t}");
        }
    }

    #[test]
    fn stable_line_is_proportional() {
        let grid = GridSpec::new(vec![0.5, 1.0, 3.0], vec![1.0, 2.0]).unwrap();
        let f = sample_stable_line(1.6, 2.0, &grid, true, &mut SeededStream::new(4, 0)).unwrap();
        for j in 0..2 {
            assert!((f.get(0, j) * 6.0 - f.get(2, j)).abs() < 1e-12 * f.get(2, j).abs().max(1.0));
        }
    }

    #[test]
    fn intermediate_plus_covariance_and_mean() {
        let m = ModelParams::square(1.9, 0.5).unwrap();
        let grid = GridSpec::new(vec![0.5, 1.0], vec![0.5, 1.0]).unwrap();
        let s = IntermediateSampler::new(IntermediateSide::Plus, &grid, &m, TruncationOptions::default()).unwrap();
        let draws: Vec<GridField> = (0..10_000)
            .map(|i| s.sample(&mut SeededStream::new(5, i)).unwrap())
            .collect();
        let h = crate::theory::h_plus(1.9, 0.5);
        let v = sigma_plus_sq(&m).unwrap();
        let last: Vec<f64> = draws.iter().map(|d| d.values[3]).collect();
        assert!(mean(&last).abs() < 4.0 * mean_se(&last));
        for &(k1, k2) in &[(0, 3), (3, 3)] {
            let a: Vec<f64> = draws.iter().map(|d| d.values[k1]).collect();
            let b: Vec<f64> = draws.iter().map(|d| d.values[k2]).collect();
            let (c, se) = covariance_with_se(&a, &b);
            let pa = (grid.xs[k1 / 2], grid.ys[k1 % 2]);
            let pb = (grid.xs[k2 / 2], grid.ys[k2 % 2]);
            let exact = fbs_covariance(h, 0.5, v, pa, pb);
            assert!((c - exact).abs() < 4.0 * se, "{k1},{k2}: {c} vs {exact} ({se})");
        }
    }

    #[test]
    fn intermediate_minus_mirrors_plus() {
        let m = ModelParams::validate(1.6, 0.5, 1.0, GrainShape::UnitSquare, Usage::Field).unwrap();
        let g = GridSpec::new(vec![0.5, 1.0, 2.0], vec![0.3, 1.0]).unwrap();
        let gt = GridSpec::new(vec![0.3, 1.0], vec![0.5, 1.0, 2.0]).unwrap();
        let minus = sample_intermediate_field(
            IntermediateSide::Minus,
            &g,
            &m,
            TruncationOptions::default(),
            &mut SeededStream::new(6, 0),
        )
        .unwrap();
        let plus = sample_intermediate_field(
            IntermediateSide::Plus,
            &gt,
            &m.reflected().unwrap(),
            TruncationOptions::default(),
            &mut SeededStream::new(6, 0),
        )
        .unwrap();
        for i in 0..3 {
            for j in 0..2 {
                assert_eq!(minus.get(i, j), plus.get(j, i));
            }
        }
    }

    #[test]
    fn truncation_budget() {
        let m = ModelParams::square(1.9, 0.5).unwrap();
        let g = GridSpec::one_d(vec![1.0]).unwrap();
        let opts = TruncationOptions {
            epsilon: Some(1e-6),
            ..Default::default()
        };
        assert!(matches!(
            IntermediateSampler::new(IntermediateSide::Plus, &g, &m, opts),
            Err(Error::TruncationBudgetExceeded(_))
        ));
        let opts = TruncationOptions {
            r_max: Some(10.0),
            ..Default::default()
        };
        assert!(matches!(
            IntermediateSampler::new(IntermediateSide::Plus, &g, &m, opts),
            Err(Error::TruncationBudgetExceeded(_))
        ));
    }

    #[test]
    fn intermediate_chf_matches_theory() {
        let m = ModelParams::square(1.7, 0.5).unwrap();
        let g = GridSpec::one_d(vec![1.0]).unwrap();
        let s = IntermediateSampler::new(IntermediateSide::Plus, &g, &m, TruncationOptions::default()).unwrap();
        let n = 20_000;
        let vals: Vec<f64> = (0..n)
            .map(|i| s.sample(&mut SeededStream::new(7, i)).unwrap().values[0])
            .collect();
        let thetas = theta_grid(0.6, 7);
        let emp = empirical_chf(&vals, &thetas);
        for (t, v) in thetas.iter().zip(&emp.values) {
            let exact = intermediate_plus_log_chf(&m, *t, 1.0, 1.0).unwrap().exp();
            assert!(
                (v - exact).norm() < 3.0 / (n as f64).sqrt() * 2.0,
                "{t}: {v} vs {exact}"
            );
        }
    }

    #[test]
    fn hat_processes_share_covariance() {
        let m = ModelParams::validate(1.5, 0.6, 1.0, GrainShape::UnitSquare, Usage::Workload).unwrap();
        let xs = [0.5, 1.0];
        let ih = WorkloadLimitSampler::new(WorkloadLimit::IHat, &xs, &m, TruncationOptions::default()).unwrap();
        let zh = WorkloadLimitSampler::new(WorkloadLimit::ZHatProcess, &xs, &m, TruncationOptions::default()).unwrap();
        let n = 20_000;
        let a: Vec<Vec<f64>> = (0..n)
            .map(|i| ih.sample(&mut SeededStream::new(8, i)).unwrap())
            .collect();
        let b: Vec<Vec<f64>> = (0..n)
            .map(|i| zh.sample(&mut SeededStream::new(9, i)).unwrap())
            .collect();
        let col = |d: &[Vec<f64>], k: usize| d.iter().map(|v| v[k]).collect::<Vec<f64>>();
        let (ca, sa) = covariance_with_se(&col(&a, 0), &col(&a, 1));
        let (cb, sb) = covariance_with_se(&col(&b, 0), &col(&b, 1));
        assert!((ca - cb).abs() < 4.0 * (sa * sa + sb * sb).sqrt(), "{ca} vs {cb}");
        let v = crate::theory::chf::hat_process_variance(&m, 1.0).unwrap();
        assert!((variance(&col(&b, 1)) - v).abs() < 0.05 * v);
    }

    #[test]
    fn levy_hat_chf() {
        let m = ModelParams::validate(1.5, 0.5, 1.0, GrainShape::UnitSquare, Usage::Workload).unwrap();
        let r = crate::theory::classify_workload_regime(1.0, 2.0 / 3.0, 1.5, 0.5).unwrap();
        let s = WorkloadLimitSampler::new(WorkloadLimit::LHat, &[0.5, 1.0], &m, TruncationOptions::default()).unwrap();
        let n = 20_000;
        let vals: Vec<f64> = (0..n)
            .map(|i| s.sample(&mut SeededStream::new(10, i)).unwrap()[1])
            .collect();
        let thetas = theta_grid(1.0, 9);
        let emp = empirical_chf(&vals, &thetas);
        let th = crate::theory::workload_log_chf(&r, &m, &thetas, 1.0).unwrap();
        for ((t, v), l) in thetas.iter().zip(&emp.values).zip(&th.values) {
            assert!((v - l.exp()).norm() < 0.02, "{t}");
        }
    }

    #[test]
    fn workload_regime_checks() {
        let m = ModelParams::validate(1.5, 0.5, 1.0, GrainShape::UnitSquare, Usage::Workload).unwrap();
        assert!(matches!(
            WorkloadLimitSampler::new(WorkloadLimit::I, &[1.0], &m, TruncationOptions::default()),
            Err(Error::RegimeMismatch(_))
        ));
    }

    #[test]
    fn compensators_by_quadrature() {
        let (a, p, cf) = (1.5, 0.6, 1.5);
        for &eps in &[0.3, 2.0] {
            let mut f = |r: f64| r.powf(1.0 - p).min(1.0) * r.powf(p) * r.powf(-1.0 - a);
            let q = crate::quad::integrate_tail(&mut f, eps, a - p, &[1.0], Tolerance::rel(1e-12))
                .unwrap()
                .value;
            assert!((compensator_rate(WorkloadLimit::IHat, a, p, cf, eps) - cf * q).abs() < 1e-9);
            let mut g = |r: f64| r.powf(1.0 - p).min(1.0) * r.powf(p - 1.0 - a);
            let q = crate::quad::integrate_tail(&mut g, eps, a - p, &[1.0], Tolerance::rel(1e-12))
                .unwrap()
                .value;
            assert!((compensator_rate(WorkloadLimit::ZHatSlope, a, p, cf, eps) - cf * q).abs() < 1e-9);
        }
    }
}
