//! Direct estimate of the decay rate from simulated daters.
//!
//! The log empirical ccdf is read at quantile levels inside a window and
//! regressed on the level; minus the slope estimates `θ*`.

use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::decay::{solve, Binding, DecayReport, SolveOptions};
use crate::error::{Error, Result};
use crate::model::NetworkModel;
use crate::recursion::{sample_daters, DaterConfig, DaterPlan};
use crate::rng::{Purpose, StreamFactory};
use crate::stats::{linear_fit, mean_var, quantile_sorted, ser_ext};

pub const MIN_EXCEEDANCES: usize = 50;
pub const BOOTSTRAP_RESAMPLES: usize = 200;
/// Censored fraction above which a fit is void.
pub const MAX_CENSORED: f64 = 0.01;

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct TailWindow {
    pub lo: f64,
    pub hi: f64,
}

impl Default for TailWindow {
    fn default() -> Self {
        TailWindow { lo: 0.95, hi: 0.999 }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TailParams {
    pub replicas: usize,
    pub window: TailWindow,
    /// Quantile levels in the window, geometric in the tail probability.
    pub levels: usize,
    pub bootstrap: usize,
    pub dater: DaterConfig,
    pub seed: u64,
}

impl Default for TailParams {
    fn default() -> Self {
        TailParams {
            replicas: 100_000,
            window: TailWindow::default(),
            levels: 40,
            bootstrap: BOOTSTRAP_RESAMPLES,
            dater: DaterConfig::default(),
            seed: 0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TailFit {
    /// Converged daters used in the fit.
    pub samples: usize,
    pub censored: usize,
    pub window: TailWindow,
    /// Fitted slope of `log P̂(Z > x)`; `−θ̂`.
    pub slope: f64,
    pub slope_se: f64,
    pub theta_hat: f64,
    pub intercept: f64,
    /// `(x, log P̂(Z > x))` at the window levels.
    pub levels: Vec<(f64, f64)>,
    pub mean_horizon: f64,
    pub max_horizon: u64,
    pub plan: DaterPlan,
    /// Censored fraction exceeded the limit; the fit is not trustworthy.
    pub void: bool,
    pub warnings: Vec<String>,
}

fn level_probs(window: TailWindow, levels: usize) -> Vec<f64> {
    let (a, b) = ((1.0 - window.lo).ln(), (1.0 - window.hi).ln());
    let m = levels.max(2) - 1;
    (0..=m).map(|k| 1.0 - (a + (b - a) * k as f64 / m as f64).exp()).collect()
}

/// `(x, log ccdf)` at each level of sorted data, ties at one level merged.
fn ccdf_levels(sorted: &[f64], probs: &[f64]) -> Vec<(f64, f64)> {
    let n = sorted.len() as f64;
    let mut out: Vec<(f64, f64)> = Vec::with_capacity(probs.len());
    for &q in probs {
        let x = quantile_sorted(sorted, q);
        if out.last().is_some_and(|(px, _)| *px >= x) {
            continue;
        }
        let above = sorted.len() - sorted.partition_point(|v| *v <= x);
        if above == 0 {
            continue;
        }
        out.push((x, (above as f64 / n).ln()));
    }
    out
}

fn slope_of(levels: &[(f64, f64)]) -> Option<(f64, f64)> {
    if levels.len() < 2 {
        return None;
    }
    let (x, y): (Vec<f64>, Vec<f64>) = levels.iter().copied().unzip();
    let (a, b) = linear_fit(&x, &y);
    b.is_finite().then_some((a, b))
}

/// Fits the tail of already collected daters.
pub fn fit_sample(values: &[f64], window: TailWindow, levels: usize, bootstrap: usize, factory: &StreamFactory) -> Result<(f64, f64, f64, Vec<(f64, f64)>)> {
    if !(0.0 < window.lo && window.lo < window.hi && window.hi < 1.0) {
        return Err(Error::TailWindow(format!("need 0 < q_lo < q_hi < 1, got ({}, {})", window.lo, window.hi)));
    }
    let n = values.len();
    if n == 0 {
        return Err(Error::TailWindow("no converged daters".into()));
    }
    let mut sorted = values.to_vec();
    sorted.sort_unstable_by(f64::total_cmp);
    if sorted[0] == sorted[n - 1] {
        return Err(Error::DegenerateTail(format!("all {n} daters equal {}", sorted[0])));
    }
    let exceed = ((1.0 - window.hi) * n as f64).floor() as usize;
    if exceed < MIN_EXCEEDANCES {
        return Err(Error::TailWindow(format!(
            "{n} samples leave {exceed} above q_hi = {}; at least {MIN_EXCEEDANCES} are needed",
            window.hi
        )));
    }
    let probs = level_probs(window, levels);
    let table = ccdf_levels(&sorted, &probs);
    let (intercept, slope) = slope_of(&table)
        .ok_or_else(|| Error::DegenerateTail("the window holds fewer than two distinct levels".into()))?;

    let slopes: Vec<f64> = (0..bootstrap as u64)
        .into_par_iter()
        .filter_map(|b| {
            let mut rng = factory.stream(Purpose::Bootstrap, b);
            let mut resample: Vec<f64> = (0..n).map(|_| sorted[rng.random_range(0..n)]).collect();
            resample.sort_unstable_by(f64::total_cmp);
            slope_of(&ccdf_levels(&resample, &probs)).map(|(_, s)| s)
        })
        .collect();
    let se = if slopes.len() >= 2 { mean_var(&slopes).1.sqrt() } else { f64::NAN };
    Ok((intercept, slope, se, table))
}

pub fn fit_tail(model: &NetworkModel, params: &TailParams) -> Result<TailFit> {
    if params.replicas < 10_000 {
        return Err(Error::Invalid(format!("tail fits need at least 10^4 replicas, got {}", params.replicas)));
    }
    let factory = StreamFactory::new(params.seed);
    let batch = sample_daters(model, params.replicas, &factory, &params.dater)?;
    let censored = batch.censored();
    let values = batch.converged_values();
    let mut warnings = Vec::new();
    let void = censored as f64 > MAX_CENSORED * params.replicas as f64;
    if censored > 0 {
        warnings.push(format!(
            "{censored} of {} daters hit the horizon cap {} and were excluded",
            params.replicas, params.dater.max_horizon
        ));
    }
    if void {
        warnings.push(format!("censored fraction exceeds {:.0}%: the fit is void", MAX_CENSORED * 100.0));
    }
    let (intercept, slope, slope_se, levels) =
        fit_sample(&values, params.window, params.levels, params.bootstrap, &factory)?;
    let horizons: Vec<f64> = batch.samples.iter().map(|d| d.horizon_used as f64).collect();
    Ok(TailFit {
        samples: values.len(),
        censored,
        window: params.window,
        slope,
        slope_se,
        theta_hat: -slope,
        intercept,
        levels,
        mean_horizon: mean_var(&horizons).0,
        max_horizon: batch.samples.iter().map(|d| d.horizon_used).max().unwrap_or(0),
        plan: batch.plan,
        void,
        warnings,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Verdict {
    Pass,
    Fail,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CrossReport {
    pub verdict: Verdict,
    pub theta_hat: f64,
    pub theta_hat_se: f64,
    #[serde(serialize_with = "ser_ext")]
    pub theta_star: f64,
    pub binding: Binding,
    /// `max(3·s.e., 0.1·θ*)`.
    #[serde(serialize_with = "ser_ext")]
    pub tolerance: f64,
    pub fit: TailFit,
    pub decay: DecayReport,
}

/// Solver against simulation: PASS iff `|θ̂ − θ*| ≤ max(3·s.e., 0.1·θ*)`
/// and the fit is not void.
pub fn cross_validate(model: &NetworkModel, solve_options: &SolveOptions, tail: &TailParams) -> Result<CrossReport> {
    let decay = solve(model, solve_options)?;
    let fit = fit_tail(model, tail)?;
    let tolerance = (3.0 * fit.slope_se).max(0.1 * decay.theta_star);
    let ok = !fit.void && (fit.theta_hat - decay.theta_star).abs() <= tolerance;
    Ok(CrossReport {
        verdict: if ok { Verdict::Pass } else { Verdict::Fail },
        theta_hat: fit.theta_hat,
        theta_hat_se: fit.slope_se,
        theta_star: decay.theta_star,
        binding: decay.binding,
        tolerance,
        fit,
        decay,
    })
}
