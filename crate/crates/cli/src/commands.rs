use grainfield::field::{empirical_covariance, FieldSimulator, Normalization, SimulationOptions, SmallGrains};
use grainfield::limits::{
    FbsSampler, GridSpec, IntermediateSampler, IntermediateSide, WorkloadLimit, WorkloadLimitSampler,
};
use grainfield::parallel::try_replicate_map;
use grainfield::sampling::stable_sample;
use grainfield::stats::{scaling_slope, variance};
use grainfield::theory::{
    classify_field_regime, classify_workload_regime, covariance_exact, sigma1_hat_sq, sigma1_sq, sigma2_hat_sq,
    sigma2_sq, sigma3_sq, sigma_alpha, sigma_alpha_minus, sigma_alpha_over_p, sigma_alpha_plus, sigma_minus_sq,
    sigma_plus_sq, sigma_tilde_minus_sq, sigma_tilde_plus_sq, workload_constants, FieldFamily, FieldLimit, FieldRegime,
    WorkloadFamily, WorkloadRegime,
};
use grainfield::verify::{self, results_csv_body, Suite, RESULTS_HEADER};
use grainfield::workload::{simulate_replicates, WorkloadConfig};
use grainfield::{Error, GrainShape, ModelParams, SeededStream, Usage};

use crate::config::{RunConfig, ScenarioKind, SmallGrainMode, DEFAULT_OUTPUT_DIR, OUTPUT_DIR_ENV};
use crate::error::CliError;
use crate::output::{output_path, CsvTable};

const VERSION: &str = env!("CARGO_PKG_VERSION");

fn params_label(params: &ModelParams) -> String {
    format!(
        "alpha={} p={} r_min={} grain={}",
        params.alpha,
        params.p,
        params.r_min,
        params.grain.name()
    )
}

pub fn field_label(r: &FieldRegime) -> String {
    let log = if r.log_correction { " log" } else { "" };
    format!("{} H={}{log}", r.family, r.h)
}

pub fn workload_label(r: &WorkloadRegime) -> String {
    let log = if r.log_correction { " log" } else { "" };
    format!("{} H={}{log} rate={:?}", r.family, r.script_h, r.rate)
}

/// Constants of the field limit at `regime`.
pub fn field_constants(regime: &FieldRegime, params: &ModelParams) -> grainfield::Result<Vec<(&'static str, f64)>> {
    use FieldFamily::*;
    let g = regime.gamma;
    Ok(match regime.family {
        StableSheet => vec![("sigma_alpha", sigma_alpha(params))],
        StableSlidePlus => vec![("sigma_alpha_plus", sigma_alpha_plus(params)?)],
        StableSlideMinus => vec![("sigma_alpha_minus", sigma_alpha_minus(params)?)],
        FbsPlus => vec![("sigma_plus_sq", sigma_plus_sq(params)?)],
        FbsMinus => vec![("sigma_minus_sq", sigma_minus_sq(params)?)],
        FbsLogPlus => vec![("sigma_tilde_plus_sq", sigma_tilde_plus_sq(g, params)?)],
        FbsLogMinus => vec![("sigma_tilde_minus_sq", sigma_tilde_minus_sq(g, params)?)],
        IntermediatePlus | IntermediateMinus => Vec::new(),
    })
}

fn base_table(header: &[&str], command: &str, cfg: &RunConfig, params: &ModelParams, regime: &str) -> CsvTable {
    let mut t = CsvTable::new(header);
    t.meta("tool", format!("grainfield {VERSION}"))
        .meta("command", command)
        .meta("seed", cfg.execution.seed.to_string())
        .meta("params", params_label(params))
        .meta("regime", regime)
        .meta("rerun", format!("grainfield {command} --config {command}.config.toml"));
    t
}

/// Writes the table and the resolved config beside it.
fn persist(cfg: &RunConfig, command: &str, tables: &[(&str, &CsvTable)]) -> Result<(), CliError> {
    let dir = &cfg.output.directory;
    std::fs::write(output_path(dir, &format!("{command}.config.toml"))?, cfg.to_toml())?;
    for (name, table) in tables {
        let path = output_path(dir, name)?;
        table.write(&path)?;
        println!("wrote {} ({} rows)", path.display(), table.rows.len());
    }
    Ok(())
}

fn stream_id(block: usize, replicate: usize) -> u64 {
    ((block as u64) << 32) | replicate as u64
}

fn require_kind(cfg: &RunConfig, kind: ScenarioKind, command: &str) -> Result<(), CliError> {
    if cfg.scenario.kind != kind {
        return Err(CliError::Config(
            format!("{command} needs scenario.kind = {kind:?}").to_lowercase(),
        ));
    }
    Ok(())
}

pub struct ClassifyArgs {
    pub alpha: f64,
    pub p: f64,
    pub gamma: f64,
    pub beta: Option<f64>,
    pub workload: bool,
    pub r_min: f64,
}

pub fn classify(args: &ClassifyArgs) -> Result<(), CliError> {
    let workload = args.workload || args.beta.is_some();
    let usage = if workload { Usage::Workload } else { Usage::Field };
    let params = ModelParams::validate(args.alpha, args.p, args.r_min, GrainShape::UnitSquare, usage)?;
    let mut t = CsvTable::new(&["quantity", "value"]);
    t.meta("tool", format!("grainfield {VERSION}"))
        .meta("params", params_label(&params));
    let (label, consts) = if workload {
        let beta = args.beta.unwrap_or(f64::INFINITY);
        let r = classify_workload_regime(args.gamma, beta, args.alpha, args.p)?;
        let c = workload_constants(args.gamma, beta, &params)?;
        t.meta(
            "rerun",
            format!(
                "grainfield classify --alpha {} --p {} --gamma {} --beta {beta}",
                args.alpha, args.p, args.gamma
            ),
        );
        t.push(vec!["family".into(), r.family.to_string().into()]);
        t.push(vec!["rate".into(), format!("{:?}", r.rate).into()]);
        t.push(vec!["H".into(), r.script_h.into()]);
        t.push(vec!["log_correction".into(), r.log_correction.to_string().into()]);
        if let Some(i) = r.index {
            t.push(vec!["index".into(), i.into()]);
        }
        if let Some(h) = r.hurst {
            t.push(vec!["hurst".into(), h.into()]);
        }
        (workload_label(&r), c.entries())
    } else {
        let r = classify_field_regime(args.gamma, args.alpha, args.p)?;
        let c = field_constants(&r, &params)?;
        t.meta(
            "rerun",
            format!(
                "grainfield classify --alpha {} --p {} --gamma {}",
                args.alpha, args.p, args.gamma
            ),
        );
        t.push(vec!["family".into(), r.family.to_string().into()]);
        t.push(vec!["H".into(), r.h.into()]);
        t.push(vec!["log_correction".into(), r.log_correction.to_string().into()]);
        (field_label(&r), c)
    };
    t.meta("regime", label.clone());
    println!("{label}");
    for (name, v) in &consts {
        println!("  {name} = {v}");
        t.push(vec![(*name).into(), (*v).into()]);
    }
    let dir = std::env::var(OUTPUT_DIR_ENV).unwrap_or_else(|_| DEFAULT_OUTPUT_DIR.to_string());
    t.write(&output_path(&dir, "classify.csv")?)?;
    Ok(())
}

fn simulation_options(cfg: &RunConfig) -> SimulationOptions {
    SimulationOptions {
        cap: cfg.execution.grain_cap,
        small_grains: match cfg.scenario.small_grains {
            SmallGrainMode::Exact => SmallGrains::Exact,
            SmallGrainMode::Gaussian => SmallGrains::Gaussian {
                target: cfg.scenario.small_grain_target,
            },
        },
    }
}

pub fn simulate_field(cfg: &RunConfig) -> Result<(), CliError> {
    require_kind(cfg, ScenarioKind::Field, "simulate-field")?;
    let params = cfg.params()?;
    let sc = &cfg.scenario;
    let regime = classify_field_regime(sc.gamma, params.alpha, params.p)?;
    let norm = Normalization {
        h: regime.h,
        log_correction: regime.log_correction,
    };
    let grid = cfg.grid_points();
    let mut t = base_table(
        &["lambda", "gamma", "replicate", "x", "y", "s", "s_normalized"],
        "simulate-field",
        cfg,
        &params,
        &field_label(&regime),
    );
    for (k, &lambda) in sc.lambdas.iter().enumerate() {
        let sim = FieldSimulator::new(&params, lambda, sc.gamma, &grid, simulation_options(cfg))?;
        let seed = cfg.execution.seed;
        let samples = try_replicate_map(cfg.execution.replicates, |i| {
            sim.sample(&mut SeededStream::new(seed, stream_id(k, i)))
                .map(|s| s.with_normalization(norm))
        })?;
        for (i, s) in samples.iter().enumerate() {
            for ((&(x, y), &v), n) in s.grid.iter().zip(&s.values).zip(s.normalized()) {
                t.push(vec![
                    lambda.into(),
                    sc.gamma.into(),
                    i.into(),
                    x.into(),
                    y.into(),
                    v.into(),
                    n.into(),
                ]);
            }
        }
    }
    persist(cfg, "simulate-field", &[("simulate-field.csv", &t)])
}

pub fn scan_gamma(cfg: &RunConfig) -> Result<(), CliError> {
    require_kind(cfg, ScenarioKind::Field, "scan-gamma")?;
    let params = cfg.params()?;
    let sc = &cfg.scenario;
    let gammas = if sc.gammas.is_empty() {
        vec![sc.gamma]
    } else {
        sc.gammas.clone()
    };
    let point = (sc.xs[0], sc.ys[0]);
    let mut rows = base_table(
        &["lambda", "gamma", "replicate", "s"],
        "scan-gamma",
        cfg,
        &params,
        "per gamma; see summary",
    );
    let mut summary = base_table(
        &[
            "gamma",
            "family",
            "h",
            "log_correction",
            "slope",
            "slope_se",
            "target_slope",
        ],
        "scan-gamma",
        cfg,
        &params,
        "per gamma",
    );
    let seed = cfg.execution.seed;
    let mut block = 0;
    for &gamma in &gammas {
        let regime = classify_field_regime(gamma, params.alpha, params.p)?;
        let mut pairs = Vec::new();
        for &lambda in &sc.lambdas {
            let sim = FieldSimulator::new(&params, lambda, gamma, &[point], simulation_options(cfg))?;
            let values = try_replicate_map(cfg.execution.replicates, |i| {
                sim.sample(&mut SeededStream::new(seed, stream_id(block, i)))
                    .map(|s| s.values[0])
            })?;
            block += 1;
            for (i, &v) in values.iter().enumerate() {
                rows.push(vec![lambda.into(), gamma.into(), i.into(), v.into()]);
            }
            if values.len() > 1 {
                pairs.push((lambda, variance(&values)));
            }
        }
        let (slope, se) = match scaling_slope(&pairs) {
            Ok(f) => (f.slope, f.se),
            Err(Error::DegenerateDesign(_)) => (f64::NAN, f64::NAN),
            Err(e) => return Err(e.into()),
        };
        summary.push(vec![
            gamma.into(),
            regime.family.to_string().into(),
            regime.h.into(),
            regime.log_correction.to_string().into(),
            slope.into(),
            se.into(),
            (2.0 * regime.h).into(),
        ]);
        println!(
            "gamma={gamma} {} variance slope {slope:.4} (2H={})",
            regime.family,
            2.0 * regime.h
        );
    }
    persist(
        cfg,
        "scan-gamma",
        &[("scan-gamma.csv", &rows), ("scan-gamma-summary.csv", &summary)],
    )
}

pub fn covariance(cfg: &RunConfig) -> Result<(), CliError> {
    require_kind(cfg, ScenarioKind::Field, "covariance")?;
    let params = cfg.params()?;
    let lags: Vec<(f64, f64)> = if cfg.scenario.lags.is_empty() {
        vec![(0.0, 0.0), (0.5, 0.0), (0.0, 0.5), (1.0, 1.0)]
    } else {
        cfg.scenario.lags.iter().map(|l| (l[0], l[1])).collect()
    };
    let est = empirical_covariance(&params, &lags, cfg.scenario.points, cfg.execution.seed)?;
    let mut t = base_table(
        &["t", "s", "rho_hat", "se", "rho_exact"],
        "covariance",
        cfg,
        &params,
        "covariance",
    );
    for e in &est {
        let exact = covariance_exact(e.t, e.s, &params)?;
        println!(
            "({}, {}) rho_hat={:.5} se={:.5} exact={:.5}",
            e.t, e.s, e.rho, e.se, exact
        );
        t.push(vec![e.t.into(), e.s.into(), e.rho.into(), e.se.into(), exact.into()]);
    }
    persist(cfg, "covariance", &[("covariance.csv", &t)])
}

type PathSampler<'a> = Box<dyn Fn(&mut SeededStream) -> grainfield::Result<Vec<f64>> + Sync + Send + 'a>;

fn line_sampler(index: f64, sigma_pow: f64, xs: Vec<f64>) -> PathSampler<'static> {
    // `x Z` for a single stable variable `Z`.
    Box::new(move |s| {
        let z = stable_sample(index, sigma_pow.powf(1.0 / index), s);
        Ok(xs.iter().map(|x| x * z).collect())
    })
}

fn gaussian_sampler(grid: &GridSpec, h1: f64, h2: f64, variance: f64) -> grainfield::Result<PathSampler<'static>> {
    let f = FbsSampler::new(grid, h1, h2, variance)?;
    Ok(Box::new(move |s| Ok(f.sample(s).values)))
}

fn field_limit_sampler<'a>(
    regime: &FieldRegime,
    params: &ModelParams,
    grid: &'a GridSpec,
    cfg: &RunConfig,
) -> grainfield::Result<PathSampler<'a>> {
    use FieldFamily::*;
    let g = regime.gamma;
    Ok(match regime.limit {
        FieldLimit::StableSheet { index } => {
            let s = sigma_alpha(params);
            Box::new(move |st| Ok(grainfield::limits::sample_levy_sheet(grid, index, s, st)?.values))
        }
        FieldLimit::StableLine { index, along_y } => {
            let s = if along_y {
                sigma_alpha_plus(params)?
            } else {
                sigma_alpha_minus(params)?
            };
            Box::new(move |st| Ok(grainfield::limits::sample_stable_line(index, s, grid, along_y, st)?.values))
        }
        FieldLimit::Fbs { h1, h2 } => {
            let v = match regime.family {
                FbsPlus => sigma_plus_sq(params)?,
                FbsMinus => sigma_minus_sq(params)?,
                FbsLogPlus => sigma_tilde_plus_sq(g, params)?,
                _ => sigma_tilde_minus_sq(g, params)?,
            };
            gaussian_sampler(grid, h1, h2, v)?
        }
        FieldLimit::IntermediatePoisson { plus } => {
            let side = if plus {
                IntermediateSide::Plus
            } else {
                IntermediateSide::Minus
            };
            let s = IntermediateSampler::new(side, grid, params, cfg.scenario.truncation.options())?;
            Box::new(move |st| Ok(s.sample(st)?.values))
        }
    })
}

fn workload_limit_sampler(
    regime: &WorkloadRegime,
    params: &ModelParams,
    xs: &[f64],
    cfg: &RunConfig,
) -> grainfield::Result<PathSampler<'static>> {
    use WorkloadFamily::*;
    let (a, p) = (params.alpha, params.p);
    let (g, b) = (regime.gamma, regime.beta);
    let line = GridSpec::new(xs.to_vec(), vec![1.0])?;
    let levy = |index: f64, s: f64| -> PathSampler<'static> {
        let line = line.clone();
        Box::new(move |st| Ok(grainfield::limits::sample_levy_sheet(&line, index, s, st)?.values))
    };
    let poisson = |kind: WorkloadLimit| -> grainfield::Result<PathSampler<'static>> {
        let s = WorkloadLimitSampler::new(kind, xs, params, cfg.scenario.truncation.options())?;
        Ok(Box::new(move |st| s.sample(st)))
    };
    Ok(match regime.family {
        AlphaStableLevy => levy(a, sigma_alpha(params)),
        AlphaOverPStableLevy => levy(a / p, sigma_alpha_over_p(params)?),
        BrownianMotion => gaussian_sampler(&line, 0.5, 0.5, sigma1_sq(params)?)?,
        BrownianMotionLog => gaussian_sampler(&line, 0.5, 0.5, sigma1_hat_sq(g, b, params)?)?,
        BrownianMotionLogFast => gaussian_sampler(&line, 0.5, 0.5, sigma2_hat_sq(b, params)?)?,
        FbmSlow => gaussian_sampler(&line, (3.0 - a / p) / 2.0, 0.5, sigma2_sq(params)?)?,
        FbmPlus => gaussian_sampler(&line, grainfield::theory::h_plus(a, p), 0.5, sigma_plus_sq(params)?)?,
        GaussianLine => gaussian_sampler(&line, 1.0, 0.5, sigma3_sq(params)?)?,
        GaussianLineLog => gaussian_sampler(&line, 1.0, 0.5, sigma_tilde_plus_sq(g, params)?)?,
        StableLinePlus => {
            let ap = (a - p) / (1.0 - p);
            line_sampler(ap, sigma_alpha_plus(params)?, xs.to_vec())
        }
        IntermediateGaussHat => poisson(WorkloadLimit::ZHatProcess)?,
        IntermediateLevyHat => poisson(WorkloadLimit::LHat)?,
        GaussianLineHatZ => poisson(WorkloadLimit::ZHatSlope)?,
        IntermediateI => poisson(WorkloadLimit::I)?,
        IntermediateIHat => poisson(WorkloadLimit::IHat)?,
        IntermediateIPlus => poisson(WorkloadLimit::IPlus)?,
    })
}

pub fn limit_sample(cfg: &RunConfig) -> Result<(), CliError> {
    let params = cfg.params()?;
    let sc = &cfg.scenario;
    let seed = cfg.execution.seed;
    let n = cfg.execution.replicates;
    let table = match sc.kind {
        ScenarioKind::Field => {
            let regime = classify_field_regime(sc.gamma, params.alpha, params.p)?;
            let grid = GridSpec::new(sc.xs.clone(), sc.ys.clone())?;
            let sampler = field_limit_sampler(&regime, &params, &grid, cfg)?;
            let paths = try_replicate_map(n, |i| sampler(&mut SeededStream::new(seed, i as u64)))?;
            let mut t = base_table(
                &["replicate", "x", "y", "value"],
                "limit-sample",
                cfg,
                &params,
                &field_label(&regime),
            );
            for (i, path) in paths.iter().enumerate() {
                let points = grainfield::limits::GridField {
                    grid: grid.clone(),
                    values: path.clone(),
                };
                for (x, y, v) in points.points() {
                    t.push(vec![i.into(), x.into(), y.into(), v.into()]);
                }
            }
            t
        }
        ScenarioKind::Workload => {
            let regime = classify_workload_regime(sc.gamma, cfg.beta(), params.alpha, params.p)?;
            let sampler = workload_limit_sampler(&regime, &params, &sc.xs, cfg)?;
            let paths = try_replicate_map(n, |i| sampler(&mut SeededStream::new(seed, i as u64)))?;
            let mut t = base_table(
                &["replicate", "x", "value"],
                "limit-sample",
                cfg,
                &params,
                &workload_label(&regime),
            );
            for (i, path) in paths.iter().enumerate() {
                for (&x, &v) in sc.xs.iter().zip(path) {
                    t.push(vec![i.into(), x.into(), v.into()]);
                }
            }
            t
        }
    };
    persist(cfg, "limit-sample", &[("limit-sample.csv", &table)])
}

pub fn workload(cfg: &RunConfig) -> Result<(), CliError> {
    require_kind(cfg, ScenarioKind::Workload, "workload")?;
    let params = cfg.params()?;
    let sc = &cfg.scenario;
    let wc = WorkloadConfig::new(sc.t, sc.gamma, cfg.beta(), sc.xs.clone(), params.clone())?
        .with_cap(cfg.execution.grain_cap);
    let regime = wc.regime()?;
    let paths = simulate_replicates(&wc, cfg.execution.replicates, cfg.execution.seed)?;
    let mut t = base_table(
        &["t", "replicate", "x", "a_normalized"],
        "workload",
        cfg,
        &params,
        &workload_label(&regime),
    );
    for (i, path) in paths.iter().enumerate() {
        for (&x, &v) in sc.xs.iter().zip(path) {
            t.push(vec![sc.t.into(), i.into(), x.into(), v.into()]);
        }
    }
    println!(
        "{} replicates of A(Tx) at T={}, {}",
        paths.len(),
        sc.t,
        workload_label(&regime)
    );
    persist(cfg, "workload", &[("workload.csv", &t)])
}

pub fn verify(suite: Suite, seed: u64, only: &[u32], dir: &str) -> Result<(), CliError> {
    let results = verify::run_suite(suite, seed, only);
    let mut text = format!(
        "# tool: grainfield {VERSION}\n# command: verify\n# suite: {suite}\n# seed: {seed}\n# rerun: grainfield verify --suite {suite} --seed {seed}\n"
    );
    text.push_str(RESULTS_HEADER);
    text.push('\n');
    text.push_str(&results_csv_body(&results));
    let path = output_path(dir, "verify.csv")?;
    std::fs::write(&path, text)?;
    for r in &results {
        println!(
            "{} criterion {:>2} {:<28} metric={:.6} target={:.6} tol={:.6} ({:.1}s)",
            r.status(),
            r.id,
            r.name,
            r.metric,
            r.target,
            r.tolerance,
            r.seconds
        );
    }
    println!("wrote {}", path.display());
    let failed = results.iter().filter(|r| !r.passed).count();
    if failed > 0 {
        return Err(CliError::VerifyFailed(failed));
    }
    Ok(())
}
