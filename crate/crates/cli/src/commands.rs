use std::path::Path;

use maxplus_tails::decay::{
    eta_of, optimize_routing, solve, RoutingFamily, SolveMethod, SolveOptions,
};
use maxplus_tails::library::{builtin, BuiltinParams, ModelFacts};
use maxplus_tails::mgf::{
    block_formula, lambda_block_empirical, lambda_s_empirical, theta_grid, Estimator, MgfParams,
};
use maxplus_tails::model::{check_unit_max_degree, model_to_json};
use maxplus_tails::recursion::{sample_daters, DaterConfig};
use maxplus_tails::rng::StreamFactory;
use maxplus_tails::stats::{mean_var, quantile_sorted, ExtReal};
use maxplus_tails::structure::{analyze, classes_of};
use maxplus_tails::tail::{cross_validate, fit_tail, TailParams, TailWindow, Verdict};
use maxplus_tails::{parse_model, ArrivalSpec, Distribution, NetworkModel};
use serde::Serialize;

use crate::manifest::Run;
use crate::*;

pub fn dispatch(command: &Command, record_time: bool) -> Result<u8, Failure> {
    match command {
        Command::Validate(a) => validate(a, record_time),
        Command::Analyze(a) => analyze_cmd(a, record_time),
        Command::Simulate(a) => simulate(a, record_time),
        Command::Mgf(a) => mgf(a, record_time),
        Command::Theta(a) => theta(a, record_time),
        Command::Tailfit(a) => tailfit(a, record_time),
        Command::Crosscheck(a) => crosscheck(a, record_time),
        Command::Optimize(a) => optimize(a, record_time),
        Command::Selftest(a) => crate::selftest::run(a, record_time),
    }
}

pub fn load_model(args: &ModelArgs) -> Result<(NetworkModel, Option<ModelFacts>), Failure> {
    match (&args.model, &args.builtin) {
        (Some(path), None) => {
            if args.mu.is_some() || args.mu1.is_some() || args.mu2.is_some() || args.mu3.is_some() || args.p.is_some() {
                return Err(Failure::usage("--mu, --mu1, --mu2, --mu3 and --p apply to --builtin models only"));
            }
            let model = read_model(path)?;
            let model = match args.lambda {
                Some(l) => model.with_arrivals(ArrivalSpec::poisson(l))?,
                None => model,
            };
            Ok((model, None))
        }
        (None, Some(name)) => {
            let params = BuiltinParams { mu: args.mu, mu1: args.mu1, mu2: args.mu2, mu3: args.mu3, lambda: args.lambda, p: args.p };
            let (m, f) = builtin(name, &params)?;
            Ok((m, Some(f)))
        }
        (None, None) => Err(Failure::usage("one of --model <file> or --builtin <name> is required")),
        (Some(_), Some(_)) => Err(Failure::usage("--model and --builtin are mutually exclusive")),
    }
}

fn read_model(path: &Path) -> Result<NetworkModel, Failure> {
    let text = std::fs::read_to_string(path).map_err(|e| Failure {
        code: EXIT_VALIDATION,
        message: format!("cannot read {}: {e}", path.display()),
    })?;
    parse_model(&text).map_err(|e| {
        let mut f = Failure::from(e);
        f.message = format!("{}: {}", path.display(), f.message);
        f
    })
}

pub fn parse_window(text: &str) -> Result<TailWindow, Failure> {
    let parts: Vec<&str> = text.split(',').map(str::trim).collect();
    let bad = || Failure::usage(format!("--quantile-window expects `lo,hi`, got `{text}`"));
    if parts.len() != 2 {
        return Err(bad());
    }
    let lo: f64 = parts[0].parse().map_err(|_| bad())?;
    let hi: f64 = parts[1].parse().map_err(|_| bad())?;
    Ok(TailWindow { lo, hi })
}

fn parse_horizon(text: &str) -> Result<u64, Failure> {
    if text == "auto" {
        return Ok(DaterConfig::default().max_horizon);
    }
    text.parse::<u64>()
        .ok()
        .filter(|h| *h > 0)
        .ok_or_else(|| Failure::usage(format!("--horizon expects a positive integer or `auto`, got `{text}`")))
}

fn estimator(e: EstimatorArg) -> Estimator {
    match e {
        EstimatorArg::Cloning => Estimator::Cloning,
        EstimatorArg::Independent => Estimator::Independent,
    }
}

pub fn solve_options(a: &SolveArgs, seed: u64) -> SolveOptions {
    SolveOptions {
        method: match a.method {
            MethodArg::AnalyticFirst => SolveMethod::AnalyticFirst,
            MethodArg::EmpiricalOnly => SolveMethod::EmpiricalOnly,
        },
        mgf: MgfParams { n: a.n, replicas: a.mgf_replicas, burn_in: None, estimator: estimator(a.estimator) },
        grid_points: a.points,
        theta_max: a.theta_max,
        eta_override: a.eta,
        seed,
        ..SolveOptions::default()
    }
}

pub fn tail_params(a: &TailArgs, seed: u64) -> Result<TailParams, Failure> {
    Ok(TailParams {
        replicas: a.replicas,
        window: parse_window(&a.quantile_window)?,
        bootstrap: a.bootstrap,
        dater: DaterConfig { max_horizon: parse_horizon(&a.horizon)?, ..DaterConfig::default() },
        seed,
        ..TailParams::default()
    })
}

fn validate(a: &ValidateArgs, record_time: bool) -> Result<u8, Failure> {
    let model = match (&a.path, &a.model.model, &a.model.builtin) {
        (Some(p), None, None) => read_model(p)?,
        (None, _, _) => load_model(&a.model)?.0,
        _ => return Err(Failure::usage("give the config either positionally or through --model/--builtin")),
    };
    #[derive(Serialize)]
    struct Out {
        valid: bool,
        name: Option<String>,
        s: usize,
        components: usize,
        coins: usize,
        config: serde_json::Value,
    }
    let config = serde_json::from_str(&model_to_json(&model)).unwrap_or(serde_json::Value::Null);
    let mut run = Run::new("validate", &serde_json::json!({ "model": a.path.as_ref().or(a.model.model.as_ref()), "builtin": a.model.builtin }), record_time);
    run.emit(&Out {
        valid: true,
        name: model.name().map(str::to_string),
        s: model.dim(),
        components: model.num_components(),
        coins: model.coins().len(),
        config,
    })?;
    Ok(0)
}

fn analyze_cmd(a: &AnalyzeArgs, record_time: bool) -> Result<u8, Failure> {
    let (model, _) = load_model(&a.model)?;
    let report = analyze(&model, a.samples, a.seed);
    let corollary = check_unit_max_degree(&model);
    let mut run = Run::new("analyze", a, record_time);
    run.emit(&serde_json::json!({ "structure": report, "unit_max_degree": corollary }))?;
    Ok(0)
}

fn simulate(a: &SimulateArgs, record_time: bool) -> Result<u8, Failure> {
    let (model, _) = load_model(&a.model)?;
    let config = DaterConfig { max_horizon: parse_horizon(&a.horizon)?, force: a.force, ..DaterConfig::default() };
    if a.replicas == 0 {
        return Err(Failure::usage("--replicas must be positive"));
    }
    let batch = sample_daters(&model, a.replicas, &StreamFactory::new(a.seed), &config)?;
    let mut z = batch.converged_values();
    z.sort_unstable_by(f64::total_cmp);
    let horizons: Vec<f64> = batch.samples.iter().map(|d| d.horizon_used as f64).collect();
    let q = |p: f64| if z.is_empty() { f64::NAN } else { quantile_sorted(&z, p) };
    let mut run = Run::new("simulate", a, record_time);
    if let Some(out) = &a.out {
        let rows: Vec<String> = batch
            .samples
            .iter()
            .enumerate()
            .map(|(r, d)| format!("{r},{},{},{}", d.z, d.horizon_used, d.converged))
            .collect();
        run.write_csv(out, "replica,Z,horizon_used,converged", &rows)?;
    }
    run.emit(&serde_json::json!({
        "gamma": batch.plan.pilot.gamma,
        "gamma_se": batch.plan.pilot.se,
        "mean_interarrival": batch.plan.pilot.a,
        "stable": batch.plan.pilot.stable,
        "margin": batch.plan.margin,
        "replicas": a.replicas,
        "censored": batch.censored(),
        "mean_z": ExtReal(if z.is_empty() { f64::NAN } else { mean_var(&z).0 }),
        "median_z": ExtReal(q(0.5)),
        "q99_z": ExtReal(q(0.99)),
        "mean_horizon": mean_var(&horizons).0,
    }))?;
    Ok(0)
}

fn mgf(a: &MgfArgs, record_time: bool) -> Result<u8, Failure> {
    let (model, _) = load_model(&a.model)?;
    let eta = eta_of(&model)?;
    let thetas = theta_grid(eta, a.theta_max, a.points);
    let params = MgfParams { n: a.n, replicas: a.replicas, burn_in: None, estimator: estimator(a.estimator) };
    let factory = StreamFactory::new(a.seed);
    let classes = classes_of(&model);
    let (curve, analytic) = if a.block.eq_ignore_ascii_case("s") {
        (lambda_s_empirical(&model, &thetas, &params, &factory)?, None)
    } else {
        let l: usize = a
            .block
            .parse()
            .ok()
            .filter(|l| (1..=classes.len()).contains(l))
            .ok_or_else(|| Failure::usage(format!("--block expects S or a class in 1..={}, got `{}`", classes.len(), a.block)))?;
        let curve = lambda_block_empirical(&model, &classes, l - 1, &thetas, &params, &factory)?;
        let analytic = block_formula(&model, &classes, l - 1)
            .map(|f| thetas.iter().map(|t| ExtReal(f.eval(*t))).collect::<Vec<_>>());
        (curve, analytic)
    };
    let mut run = Run::new("mgf", a, record_time);
    if let Some(out) = &a.out {
        let rows: Vec<String> = curve
            .points
            .iter()
            .map(|p| format!("{},{},{},{}", p.theta, p.value, p.half_width, if p.infinite { "INFINITE" } else { "" }))
            .collect();
        run.write_csv(out, "theta,lambda_hat,ci,flag", &rows)?;
    }
    let violations = curve.convexity_violations(3.0);
    run.emit(&serde_json::json!({
        "eta": ExtReal(eta),
        "curve": curve,
        "analytic": analytic,
        "convexity_violations": violations,
    }))?;
    Ok(0)
}

fn theta(a: &ThetaArgs, record_time: bool) -> Result<u8, Failure> {
    let (model, _) = load_model(&a.model)?;
    let report = solve(&model, &solve_options(&a.solve, a.seed))?;
    Run::new("theta", a, record_time).emit(&report)?;
    Ok(0)
}

fn level_rows(levels: &[(f64, f64)]) -> Vec<String> {
    levels.iter().map(|(x, y)| format!("{x},{y}")).collect()
}

fn tailfit(a: &TailfitArgs, record_time: bool) -> Result<u8, Failure> {
    let (model, _) = load_model(&a.model)?;
    let fit = fit_tail(&model, &tail_params(&a.tail, a.seed)?)?;
    let mut run = Run::new("tailfit", a, record_time);
    if let Some(out) = &a.out {
        run.write_csv(out, "x,log_ccdf", &level_rows(&fit.levels))?;
    }
    run.emit(&fit)?;
    Ok(if fit.void { EXIT_ESTIMATION } else { 0 })
}

fn crosscheck(a: &CrosscheckArgs, record_time: bool) -> Result<u8, Failure> {
    let (model, _) = load_model(&a.model)?;
    let report = cross_validate(&model, &solve_options(&a.solve, a.seed), &tail_params(&a.tail, a.seed)?)?;
    let mut run = Run::new("crosscheck", a, record_time);
    if let Some(out) = &a.out {
        run.write_csv(out, "x,log_ccdf", &level_rows(&report.fit.levels))?;
    }
    run.emit(&report)?;
    Ok(match report.verdict {
        Verdict::Pass => 0,
        Verdict::Fail => EXIT_ESTIMATION,
    })
}

fn optimize(a: &OptimizeArgs, record_time: bool) -> Result<u8, Failure> {
    let family = RoutingFamily::exponential(a.mu2, a.mu3, a.lambda);
    Distribution::exponential(a.mu2).validate("mu2")?;
    Distribution::exponential(a.mu3).validate("mu3")?;
    family.arrivals.validate("lambda")?;
    let opt = optimize_routing(&family, a.numeric)?;
    Run::new("optimize", a, record_time).emit(&opt)?;
    Ok(0)
}
