//! Aggregated workload `A_{M,K}(Tx)` of sessions transmitting at rate
//! `R^{1-p} ∧ K` for a duration `R^p`.

use crate::error::{Error, Result};
use crate::geometry::interval_overlap;
use crate::parallel::try_replicate_map;
use crate::sampling::{pareto_from_uniform, poisson_count, SeededStream, DEFAULT_GRAIN_CAP};
use crate::theory::{classify_workload_regime, ModelParams, Usage, WorkloadRegime};

#[derive(Debug, Clone, PartialEq)]
pub struct WorkloadConfig {
    pub t: f64,
    pub gamma: f64,
    /// `f64::INFINITY` means no rate cap.
    pub beta: f64,
    pub xs: Vec<f64>,
    pub params: ModelParams,
    /// Upper limit on the number of sessions per path.
    pub cap: u64,
}

impl WorkloadConfig {
    pub fn new(t: f64, gamma: f64, beta: f64, xs: Vec<f64>, params: ModelParams) -> Result<Self> {
        if !(t > 0.0 && t.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "T must be positive and finite, got {t}"
            )));
        }
        if !(gamma > 0.0 && gamma.is_finite()) {
            return Err(Error::InvalidArgument(format!("gamma must be positive, got {gamma}")));
        }
        if !(beta > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "beta must be positive or +inf, got {beta}"
            )));
        }
        if xs.is_empty() || xs[0] <= 0.0 || xs.windows(2).any(|w| !(w[1] > w[0])) || !xs.iter().all(|x| x.is_finite()) {
            return Err(Error::InvalidArgument(
                "x-grid must be positive and strictly increasing".into(),
            ));
        }
        if !params.usage_ok(Usage::Workload) {
            return Err(Error::POutOfRange {
                value: params.p,
                range: "(0,1]",
            });
        }
        Ok(WorkloadConfig {
            t,
            gamma,
            beta,
            xs,
            params,
            cap: DEFAULT_GRAIN_CAP,
        })
    }

    pub fn with_cap(mut self, cap: u64) -> Self {
        self.cap = cap;
        self
    }

    /// Connection rate `M = T^gamma`.
    pub fn m(&self) -> f64 {
        self.t.powf(self.gamma)
    }

    /// Rate cap `K = T^beta`.
    pub fn k(&self) -> f64 {
        if self.beta.is_infinite() {
            f64::INFINITY
        } else {
            self.t.powf(self.beta)
        }
    }

    pub fn regime(&self) -> Result<WorkloadRegime> {
        classify_workload_regime(self.gamma, self.beta, self.params.alpha, self.params.p)
    }

    /// `E[(R^{1-p} ∧ K) R^p]`, split at `R = K^{1/(1-p)}`.
    pub fn mean_work_per_session(&self) -> f64 {
        let (p, k) = (self.params.p, self.k());
        if p == 1.0 {
            return k.min(1.0) * self.params.mean_r();
        }
        if k.is_infinite() {
            return self.params.mean_r();
        }
        let c = k.powf(1.0 / (1.0 - p));
        self.params.partial_moment_below(1.0, c) + k * self.params.partial_moment_above(p, c)
    }

    /// `E A(Tx) = Tx M E[(R^{1-p} ∧ K) R^p]`.
    pub fn mean_workload(&self, x: f64) -> f64 {
        self.t * x * self.m() * self.mean_work_per_session()
    }

    /// Expected number of sessions overlapping `(0, T x_max]`.
    pub fn expected_sessions(&self) -> f64 {
        self.m() * (self.t * self.x_max() + self.params.mean_r_p())
    }

    fn x_max(&self) -> f64 {
        *self.xs.last().unwrap()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Session {
    pub u: f64,
    pub duration: f64,
    pub rate: f64,
}

impl Session {
    pub fn from_radius(u: f64, r: f64, p: f64, k: f64) -> Self {
        Session {
            u,
            duration: r.powf(p),
            rate: r.powf(1.0 - p).min(k),
        }
    }

    /// Work transmitted during `(0, t]`.
    pub fn work(&self, t: f64) -> f64 {
        self.rate * interval_overlap(self.u, self.duration, t)
    }
}

/// Sessions that can overlap `(0, T x_max]`. Arrivals on `(-R^p, T x_max)`
/// come from the size-biased mixture with weights `T x_max M` (index
/// `alpha`) and `M E R^p` (index `alpha - p`).
pub fn sample_sessions(config: &WorkloadConfig, stream: &mut SeededStream) -> Result<Vec<Session>> {
    let mut out = Vec::new();
    for_each_session(config, stream, |s| out.push(s))?;
    Ok(out)
}

fn for_each_session<F: FnMut(Session)>(config: &WorkloadConfig, stream: &mut SeededStream, mut f: F) -> Result<()> {
    let p = &config.params;
    let (a, pp) = (p.alpha, p.p);
    let horizon = config.t * config.x_max();
    let w0 = config.m() * horizon;
    let total = config.expected_sessions();
    let n = poisson_count(total, stream)?;
    if n > config.cap {
        return Err(Error::BudgetExceeded {
            count: n,
            cap: config.cap,
        });
    }
    let k = config.k();
    for _ in 0..n {
        let index = if stream.uniform(0.0, total) < w0 { a } else { a - pp };
        let r = pareto_from_uniform(p.r_min, index, stream.uniform_open0());
        let d = r.powf(pp);
        let u = stream.uniform(-d, horizon);
        f(Session::from_radius(u, r, pp, k));
    }
    Ok(())
}

/// Uncentered `A(Tx)` on the x-grid.
pub fn simulate_a_raw(config: &WorkloadConfig, stream: &mut SeededStream) -> Result<Vec<f64>> {
    let ts: Vec<f64> = config.xs.iter().map(|x| config.t * x).collect();
    let mut out = vec![0.0; ts.len()];
    for_each_session(config, stream, |s| {
        for (o, &t) in out.iter_mut().zip(&ts) {
            *o += s.work(t);
        }
    })?;
    Ok(out)
}

/// `A(Tx) - E A(Tx)` on the x-grid.
pub fn simulate_a(config: &WorkloadConfig, stream: &mut SeededStream) -> Result<Vec<f64>> {
    let mut v = simulate_a_raw(config, stream)?;
    for (o, &x) in v.iter_mut().zip(&config.xs) {
        *o -= config.mean_workload(x);
    }
    Ok(v)
}

/// `b_T = T^H`, times `(log T)^{1/2}` under a log correction.
pub fn normalizer(config: &WorkloadConfig, regime: &WorkloadRegime) -> Result<f64> {
    let same = |a: f64, b: f64| a == b || (a.is_infinite() && b.is_infinite());
    if !(same(regime.gamma, config.gamma)
        && same(regime.beta, config.beta)
        && regime.alpha == config.params.alpha
        && regime.p == config.params.p)
    {
        return Err(Error::RegimeMismatch(format!(
            "regime classified at (gamma={}, beta={}, alpha={}, p={}) but configuration has ({}, {}, {}, {})",
            regime.gamma,
            regime.beta,
            regime.alpha,
            regime.p,
            config.gamma,
            config.beta,
            config.params.alpha,
            config.params.p
        )));
    }
    let mut b = config.t.powf(regime.script_h);
    if regime.log_correction {
        b *= config.t.ln().sqrt();
    }
    Ok(b)
}

pub fn normalize_a(path: &[f64], config: &WorkloadConfig, regime: &WorkloadRegime) -> Result<Vec<f64>> {
    let b = normalizer(config, regime)?;
    Ok(path.iter().map(|v| v / b).collect())
}

/// Centered, normalized paths for streams `0..n` of `seed`.
pub fn simulate_replicates(config: &WorkloadConfig, n: usize, seed: u64) -> Result<Vec<Vec<f64>>> {
    let regime = config.regime()?;
    let b = normalizer(config, &regime)?;
    try_replicate_map(n, |i| {
        let mut stream = SeededStream::new(seed, i as u64);
        let v = simulate_a(config, &mut stream)?;
        Ok(v.into_iter().map(|x| x / b).collect())
    })
}
