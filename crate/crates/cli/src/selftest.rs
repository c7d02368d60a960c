use maxplus_tails::decay::{solve, SolveMethod, SolveOptions};
use maxplus_tails::library::{builtin, BuiltinParams, BUILTINS};
use maxplus_tails::mgf::MgfParams;
use maxplus_tails::recursion::DaterConfig;
use maxplus_tails::stats::ExtReal;
use maxplus_tails::tail::{cross_validate, TailParams, Verdict};
use serde::Serialize;

use crate::commands::parse_window;
use crate::manifest::Run;
use crate::{Failure, SelftestArgs, EXIT_ESTIMATION};

#[derive(Serialize)]
struct Check {
    pass: bool,
    value: ExtReal,
    expected: ExtReal,
    tolerance: ExtReal,
    #[serde(skip_serializing_if = "Option::is_none")]
    note: Option<String>,
}

#[derive(Serialize)]
struct ModelRow {
    model: &'static str,
    analytic: Check,
    empirical: Check,
    tail: Check,
}

fn failed(note: String) -> Check {
    Check { pass: false, value: ExtReal(f64::NAN), expected: ExtReal(f64::NAN), tolerance: ExtReal(f64::NAN), note: Some(note) }
}

pub fn run(a: &SelftestArgs, record_time: bool) -> Result<u8, Failure> {
    let window = parse_window(&a.quantile_window)?;
    let mut rows = Vec::new();
    for (k, name) in BUILTINS.iter().enumerate() {
        let seed = a.seed.wrapping_add(k as u64);
        let (model, facts) = builtin(name, &BuiltinParams::default())?;
        let base = SolveOptions { seed, ..SolveOptions::default() };

        let analytic = match solve(&model, &base) {
            Ok(r) => {
                let expected = facts.expected_theta_star.unwrap_or(f64::NAN);
                let all_analytic = r.theta_by_class.iter().all(|c| c.curve.is_none());
                Check {
                    pass: all_analytic && (r.theta_star - expected).abs() <= 1e-9,
                    value: ExtReal(r.theta_star),
                    expected: ExtReal(expected),
                    tolerance: ExtReal(1e-9),
                    note: (!all_analytic).then(|| "some class fell back to estimation".into()),
                }
            }
            Err(e) => failed(e.to_string()),
        };
        let theta_star = analytic.value.0;

        let empirical_opts = SolveOptions {
            method: SolveMethod::EmpiricalOnly,
            mgf: MgfParams { replicas: a.mgf_replicas, ..MgfParams::default() },
            grid_points: 16,
            ..base.clone()
        };
        let empirical = match solve(&model, &empirical_opts) {
            Ok(r) => {
                let tolerance = (r.theta_star_hi - r.theta_star_lo).max(0.1 * theta_star);
                let bumps: usize = r
                    .theta_by_class
                    .iter()
                    .filter_map(|c| c.curve.as_ref())
                    .map(|c| c.convexity_violations(3.0).len())
                    .sum();
                Check {
                    pass: bumps == 0 && (r.theta_star - theta_star).abs() <= tolerance,
                    value: ExtReal(r.theta_star),
                    expected: ExtReal(theta_star),
                    tolerance: ExtReal(tolerance),
                    note: (bumps > 0).then(|| format!("{bumps} convexity violations in estimated block curves")),
                }
            }
            Err(e) => failed(e.to_string()),
        };

        let tail_params = TailParams { replicas: a.replicas, window, seed, dater: DaterConfig::default(), ..TailParams::default() };
        let tail_model = match tail_point(name) {
            Some(params) => builtin(name, &params)?.0,
            None => model.clone(),
        };
        let tail = match cross_validate(&tail_model, &base, &tail_params) {
            Ok(r) => Check {
                pass: r.verdict == Verdict::Pass,
                value: ExtReal(r.theta_hat),
                expected: ExtReal(r.theta_star),
                tolerance: ExtReal(r.tolerance),
                note: (!r.fit.warnings.is_empty()).then(|| r.fit.warnings.join("; ")),
            },
            Err(e) => failed(e.to_string()),
        };
        eprintln!(
            "selftest {name}: analytic {} empirical {} tail {}",
            pass_word(analytic.pass),
            pass_word(empirical.pass),
            pass_word(tail.pass)
        );
        rows.push(ModelRow { model: name, analytic, empirical, tail });
    }
    let all_pass = rows.iter().all(|r| r.analytic.pass && r.empirical.pass && r.tail.pass);
    Run::new("selftest", a, record_time).emit(&serde_json::json!({ "all_pass": all_pass, "models": rows }))?;
    Ok(if all_pass { 0 } else { EXIT_ESTIMATION })
}

/// Load used by the tail path when the default sits where the fitted slope
/// converges slowly. Identical tandem at λ = 0.4 has competing exponents 0.5
/// and 0.6, so the prefactor bias at desk-scale quantiles exceeds 10%; λ = 0.3
/// is on the same η plateau with exponents 0.5 and 0.7.
fn tail_point(name: &str) -> Option<BuiltinParams> {
    (name == "tandem_identical").then(|| BuiltinParams { lambda: Some(0.3), ..BuiltinParams::default() })
}

fn pass_word(p: bool) -> &'static str {
    if p {
        "PASS"
    } else {
        "FAIL"
    }
}
