//! Estimators and distances for the verification suites.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::parallel::tree_sum;

/// I.i.d. replicate values of one statistic, with seed provenance.
#[derive(Debug, Clone, PartialEq)]
pub struct ReplicateSet {
    pub values: Vec<f64>,
    pub seed: u64,
    /// Stream ids `first_stream .. first_stream + values.len()`.
    pub first_stream: u64,
    pub label: String,
}

impl ReplicateSet {
    pub fn new(values: Vec<f64>, seed: u64, first_stream: u64, label: impl Into<String>) -> Result<Self> {
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "replicate {i} is not finite: {}",
                values[i]
            )));
        }
        Ok(ReplicateSet {
            values,
            seed,
            first_stream,
            label: label.into(),
        })
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn mean(&self) -> f64 {
        mean(&self.values)
    }

    pub fn variance(&self) -> f64 {
        variance(&self.values)
    }
}

pub fn mean(values: &[f64]) -> f64 {
    if values.is_empty() {
        return f64::NAN;
    }
    tree_sum(values) / values.len() as f64
}

/// Unbiased sample variance.
pub fn variance(values: &[f64]) -> f64 {
    let n = values.len();
    if n < 2 {
        return f64::NAN;
    }
    let m = mean(values);
    let sq: Vec<f64> = values.iter().map(|v| (v - m) * (v - m)).collect();
    tree_sum(&sq) / (n - 1) as f64
}

/// Standard error of the sample mean.
pub fn mean_se(values: &[f64]) -> f64 {
    (variance(values) / values.len() as f64).sqrt()
}

/// Sample variance with its large-sample standard error
/// `sqrt((m4 - s^4) / n)`.
pub fn variance_with_se(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let m = mean(values);
    let s2 = variance(values);
    let q: Vec<f64> = values.iter().map(|v| (v - m).powi(4)).collect();
    let m4 = tree_sum(&q) / n;
    (s2, ((m4 - s2 * s2).max(0.0) / n).sqrt())
}

/// Mean of `a_i b_i` with its standard error, for already centred pairs.
pub fn product_mean_with_se(a: &[f64], b: &[f64]) -> (f64, f64) {
    let prod: Vec<f64> = a.iter().zip(b).map(|(x, y)| x * y).collect();
    (mean(&prod), mean_se(&prod))
}

/// Sample covariance and the standard error of the underlying product mean.
pub fn covariance_with_se(a: &[f64], b: &[f64]) -> (f64, f64) {
    let (ma, mb) = (mean(a), mean(b));
    let n = a.len() as f64;
    let prod: Vec<f64> = a.iter().zip(b).map(|(x, y)| (x - ma) * (y - mb)).collect();
    (tree_sum(&prod) / (n - 1.0), mean_se(&prod))
}

/// Pearson correlation.
pub fn correlation(a: &[f64], b: &[f64]) -> f64 {
    let (ma, mb) = (mean(a), mean(b));
    let mut sab = 0.0;
    let mut saa = 0.0;
    let mut sbb = 0.0;
    for (x, y) in a.iter().zip(b) {
        sab += (x - ma) * (y - mb);
        saa += (x - ma) * (x - ma);
        sbb += (y - mb) * (y - mb);
    }
    sab / (saa * sbb).sqrt()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ChfKind {
    Theoretical,
    Empirical,
}

/// Characteristic function values (or their logarithms) on a theta grid.
#[derive(Debug, Clone, PartialEq)]
pub struct ChfCurve {
    pub thetas: Vec<f64>,
    pub values: Vec<Complex64>,
    pub kind: ChfKind,
    /// Sample size of an empirical curve.
    pub n: Option<usize>,
    /// Whether `values` holds log-chf values.
    pub is_log: bool,
}

impl ChfCurve {
    pub fn theoretical_log(thetas: Vec<f64>, values: Vec<Complex64>) -> Self {
        ChfCurve {
            thetas,
            values,
            kind: ChfKind::Theoretical,
            n: None,
            is_log: true,
        }
    }

    /// The chf values, exponentiating a log curve.
    pub fn chf_values(&self) -> Vec<Complex64> {
        if self.is_log {
            self.values.iter().map(|v| v.exp()).collect()
        } else {
            self.values.clone()
        }
    }
}

/// `theta_count` equally spaced points on `[-theta_max, theta_max]`.
pub fn theta_grid(theta_max: f64, theta_count: usize) -> Vec<f64> {
    assert!(theta_count >= 2);
    let step = 2.0 * theta_max / (theta_count - 1) as f64;
    let mid = (theta_count - 1) as f64 / 2.0;
    (0..theta_count).map(|i| (i as f64 - mid) * step).collect()
}

pub fn empirical_chf(values: &[f64], thetas: &[f64]) -> ChfCurve {
    let n = values.len();
    let out = thetas
        .iter()
        .map(|&t| {
            let c: Vec<f64> = values.iter().map(|&x| (t * x).cos()).collect();
            let s: Vec<f64> = values.iter().map(|&x| (t * x).sin()).collect();
            Complex64::new(tree_sum(&c) / n as f64, tree_sum(&s) / n as f64)
        })
        .collect();
    ChfCurve {
        thetas: thetas.to_vec(),
        values: out,
        kind: ChfKind::Empirical,
        n: Some(n),
        is_log: false,
    }
}

/// `max_theta |phi_a(theta) - phi_b(theta)|` over a common grid.
pub fn chf_sup_distance(a: &ChfCurve, b: &ChfCurve) -> Result<f64> {
    if a.thetas.len() != b.thetas.len() || a.thetas.iter().zip(&b.thetas).any(|(x, y)| x != y) {
        return Err(Error::GridMismatch(format!(
            "theta grids differ ({} vs {} points)",
            a.thetas.len(),
            b.thetas.len()
        )));
    }
    let va = a.chf_values();
    let vb = b.chf_values();
    Ok(va.iter().zip(&vb).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HillEstimate {
    pub alpha: f64,
    pub se: f64,
    pub k: usize,
}

/// Default number of order statistics, `ceil(2 sqrt(n))`.
pub fn hill_default_k(n: usize) -> usize {
    (2.0 * (n as f64).sqrt()).ceil() as usize
}

/// Hill estimator of the tail index of `|values|` over the top `k` order
/// statistics: `k / sum_{i<k} ln(x_(i) / x_(k))`.
pub fn hill(values: &[f64], k: usize) -> Result<HillEstimate> {
    let n = values.len();
    if k == 0 || k >= n {
        return Err(Error::InsufficientData(format!("need 0 < k < n, got k={k}, n={n}")));
    }
    let mut mags: Vec<f64> = values.iter().map(|v| v.abs()).collect();
    mags.sort_by(|a, b| b.total_cmp(a));
    let threshold = mags[k];
    if !(threshold > 0.0) {
        return Err(Error::InsufficientData(format!("order statistic {k} is not positive")));
    }
    let logs: Vec<f64> = mags[..k].iter().map(|x| (x / threshold).ln()).collect();
    let s = tree_sum(&logs);
    if !(s > 0.0) {
        return Err(Error::InsufficientData("top order statistics are all equal".into()));
    }
    let alpha = k as f64 / s;
    Ok(HillEstimate {
        alpha,
        se: alpha / (k as f64).sqrt(),
        k,
    })
}

/// Hill estimates at `k/2`, `k` and `2k` for the default `k`, where defined.
pub fn hill_sensitivity(values: &[f64]) -> Vec<HillEstimate> {
    let k = hill_default_k(values.len());
    [k / 2, k, 2 * k]
        .iter()
        .filter_map(|&kk| hill(values, kk).ok())
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SlopeFit {
    pub slope: f64,
    pub intercept: f64,
    /// Heteroskedasticity-robust (HC1) standard error of the slope.
    pub se: f64,
}

fn distinct_count(xs: &[f64]) -> usize {
    let mut v = xs.to_vec();
    v.sort_by(f64::total_cmp);
    v.dedup();
    v.len()
}

/// Least-squares slope of `ln statistic` against `ln lambda`.
pub fn scaling_slope(pairs: &[(f64, f64)]) -> Result<SlopeFit> {
    let lambdas: Vec<f64> = pairs.iter().map(|p| p.0).collect();
    if distinct_count(&lambdas) < 4 {
        return Err(Error::DegenerateDesign(format!(
            "need at least 4 distinct lambda values, got {}",
            distinct_count(&lambdas)
        )));
    }
    if let Some(&(l, s)) = pairs.iter().find(|&&(l, s)| !(l > 0.0 && s > 0.0)) {
        return Err(Error::InvalidArgument(format!(
            "log-log fit needs positive values, got ({l}, {s})"
        )));
    }
    let x: Vec<f64> = pairs.iter().map(|p| p.0.ln()).collect();
    let y: Vec<f64> = pairs.iter().map(|p| p.1.ln()).collect();
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxx: f64 = x.iter().map(|v| (v - mx) * (v - mx)).sum();
    let sxy: f64 = x.iter().zip(&y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let meat: f64 = x
        .iter()
        .zip(&y)
        .map(|(a, b)| {
            let e = b - intercept - slope * a;
            (a - mx).powi(2) * e * e
        })
        .sum();
    let se = (n / (n - 2.0) * meat).sqrt() / sxx;
    Ok(SlopeFit { slope, intercept, se })
}

/// Slope of `ln statistic` on `ln lambda` when `ln ln lambda` is added as a
/// second regressor.
pub fn scaling_slope_with_log(pairs: &[(f64, f64)]) -> Result<f64> {
    let lambdas: Vec<f64> = pairs.iter().map(|p| p.0).collect();
    if distinct_count(&lambdas) < 4 {
        return Err(Error::DegenerateDesign("need at least 4 distinct lambda values".into()));
    }
    if pairs.iter().any(|&(l, s)| !(l > 1.0 && s > 0.0)) {
        return Err(Error::InvalidArgument(
            "fit with a log regressor needs lambda > 1".into(),
        ));
    }
    let n = pairs.len();
    let mut design = DMatrix::zeros(n, 3);
    let mut rhs = DVector::zeros(n);
    for (i, &(l, s)) in pairs.iter().enumerate() {
        design[(i, 0)] = 1.0;
        design[(i, 1)] = l.ln();
        design[(i, 2)] = l.ln().ln();
        rhs[i] = s.ln();
    }
    let xtx = design.transpose() * &design;
    let xty = design.transpose() * rhs;
    let sol = xtx
        .lu()
        .solve(&xty)
        .ok_or_else(|| Error::DegenerateDesign("singular normal equations".into()))?;
    Ok(sol[1])
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KsResult {
    pub statistic: f64,
    pub p_value: f64,
}

/// Asymptotic Kolmogorov tail `P(K > lambda)`.
fn kolmogorov_q(lambda: f64) -> f64 {
    if lambda < 0.2 {
        return 1.0;
    }
    let mut sum = 0.0;
    for k in 1..=100 {
        let kf = k as f64;
        let term = (-2.0 * kf * kf * lambda * lambda).exp();
        sum += if k % 2 == 1 { term } else { -term };
        if term < 1e-16 {
            break;
        }
    }
    (2.0 * sum).clamp(0.0, 1.0)
}

/// p-value with Stephens' small-sample correction for effective size `n`.
pub fn kolmogorov_p_value(d: f64, n_eff: f64) -> f64 {
    let s = n_eff.sqrt();
    kolmogorov_q((s + 0.12 + 0.11 / s) * d)
}

fn sorted(values: &[f64]) -> Vec<f64> {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    v
}

/// Two-sample Kolmogorov-Smirnov distance and asymptotic p-value.
pub fn ks_two_sample(a: &[f64], b: &[f64]) -> Result<KsResult> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::InsufficientData("KS needs two non-empty samples".into()));
    }
    let (sa, sb) = (sorted(a), sorted(b));
    let (na, nb) = (sa.len() as f64, sb.len() as f64);
    let (mut i, mut j) = (0usize, 0usize);
    let mut d: f64 = 0.0;
    while i < sa.len() && j < sb.len() {
        let x = sa[i].min(sb[j]);
        while i < sa.len() && sa[i] <= x {
            i += 1;
        }
        while j < sb.len() && sb[j] <= x {
            j += 1;
        }
        d = d.max((i as f64 / na - j as f64 / nb).abs());
    }
    let n_eff = na * nb / (na + nb);
    Ok(KsResult {
        statistic: d,
        p_value: kolmogorov_p_value(d, n_eff),
    })
}

/// One-sample Kolmogorov-Smirnov test against a continuous CDF.
pub fn ks_one_sample<F: Fn(f64) -> f64>(values: &[f64], cdf: F) -> Result<KsResult> {
    if values.is_empty() {
        return Err(Error::InsufficientData("KS needs a non-empty sample".into()));
    }
    let s = sorted(values);
    let n = s.len() as f64;
    let mut d: f64 = 0.0;
    for (i, &x) in s.iter().enumerate() {
        let f = cdf(x);
        d = d.max(f - i as f64 / n).max((i + 1) as f64 / n - f);
    }
    Ok(KsResult {
        statistic: d,
        p_value: kolmogorov_p_value(d, n),
    })
}

/// KS test of normality after standardising by the sample mean and
/// standard deviation.
pub fn ks_normality(values: &[f64]) -> Result<KsResult> {
    let m = mean(values);
    let s = variance(values).sqrt();
    if !(s > 0.0) {
        return Err(Error::InsufficientData("zero sample variance".into()));
    }
    let z: Vec<f64> = values.iter().map(|v| (v - m) / s).collect();
    ks_one_sample(&z, standard_normal_cdf)
}

pub fn standard_normal_cdf(x: f64) -> f64 {
    0.5 * statrs::function::erf::erfc(-x / std::f64::consts::SQRT_2)
}

/// `exp(-theta^2 v / 2)` for a centred Gaussian with variance `v`.
pub fn gaussian_chf(theta: f64, v: f64) -> f64 {
    (-0.5 * theta * theta * v).exp()
}
