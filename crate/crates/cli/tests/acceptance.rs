//! Acceptance criteria, one PASS/FAIL line each.
//!
//! Runs without the libtest harness so the verdict lines always reach
//! stdout. A failing criterion is reported, not raised: the binary exits 0
//! once every criterion has run. Pass criterion numbers as arguments to run
//! a subset, e.g. `cargo test --test acceptance -- 1 3`.

use std::process::Command;
use std::time::Instant;

use maxplus_tails::decay::{eta_of, legendre_cross_check, solve, LegendreGrid, SolveOptions};
use maxplus_tails::library::{builtin, BuiltinParams, BUILTINS};
use maxplus_tails::mgf::{lambda_block_analytic, lambda_block_empirical, lambda_s_empirical, theta_grid, MgfParams};
use maxplus_tails::recursion::{simulate_s_recorded, ReplicaStreams};
use maxplus_tails::rng::StreamFactory;
use maxplus_tails::semiring::{MaxPlus, MaxPlusMatrix};
use maxplus_tails::structure::{classes_of, communication_classes, Graph};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::Value;

struct Outcome {
    pass: bool,
    detail: String,
}

impl Outcome {
    fn new(pass: bool, detail: impl Into<String>) -> Self {
        Outcome { pass, detail: detail.into() }
    }
}

struct Cli {
    result: Value,
    secs: f64,
    code: Option<i32>,
    stdout: Vec<u8>,
}

fn cli(args: &[&str]) -> Cli {
    let t = Instant::now();
    let out = Command::new(env!("CARGO_BIN_EXE_maxplus-tails")).args(args).output().expect("binary runs");
    let secs = t.elapsed().as_secs_f64();
    let result = serde_json::from_slice::<Value>(&out.stdout).map(|d| d["result"].clone()).unwrap_or(Value::Null);
    if !out.status.success() {
        eprintln!("  {args:?} exited {:?}: {}", out.status.code(), String::from_utf8_lossy(&out.stderr).trim());
    }
    Cli { result, secs, code: out.status.code(), stdout: out.stdout }
}

fn num(v: &Value) -> f64 {
    match v {
        Value::Number(n) => n.as_f64().unwrap(),
        Value::String(s) if s == "inf" => f64::INFINITY,
        Value::String(s) if s == "-inf" => f64::NEG_INFINITY,
        _ => f64::NAN,
    }
}

fn c1_tandem_phase_transition() -> Outcome {
    let mut ok = true;
    let mut parts = Vec::new();
    for lambda in [0.2, 0.4, 0.5, 0.6, 0.8] {
        let expected = if lambda <= 0.5 { 0.5 } else { 1.0 - lambda };
        let run = cli(&["theta", "--builtin", "tandem_identical", "--mu", "1", "--lambda", &lambda.to_string()]);
        let got = num(&run.result["theta_star"]);
        let analytic = run.result["theta_by_class"].as_array().is_some_and(|c| c.iter().all(|c| c["curve"].is_null()));
        let good = run.code == Some(0) && analytic && (got - expected).abs() <= 1e-9 && run.secs < 1.0;
        ok &= good;
        parts.push(format!("λ={lambda}: θ*={got} (want {expected}, {:.2}s)", run.secs));
    }
    Outcome::new(ok, parts.join("; "))
}

/// `crosscheck` slope within 10% of `want`, under `budget` seconds.
fn crosscheck(args: &[&str], want: f64, budget: f64) -> (bool, String) {
    let run = cli(&[&["crosscheck", "--replicas", "100000"][..], args].concat());
    let got = num(&run.result["theta_hat"]);
    let se = num(&run.result["theta_hat_se"]);
    let censored = run.result["fit"]["censored"].as_u64().unwrap_or(u64::MAX);
    let rel = (got - want).abs() / want;
    let ok = run.code == Some(0) && rel <= 0.1 && run.secs < budget;
    (
        ok,
        format!("θ̂={got:.4} ± {se:.4} vs {want} (rel {:.1}%), censored {censored}, {:.0}s of {budget:.0}s", 100.0 * rel, run.secs),
    )
}

fn c2_tandem_crosscheck() -> Outcome {
    let (a, da) = crosscheck(&["--builtin", "tandem_identical", "--mu", "1", "--lambda", "0.3"], 0.5, 120.0);
    let (b, db) = crosscheck(&["--builtin", "tandem_identical", "--mu", "1", "--lambda", "0.7"], 0.3, 120.0);
    Outcome::new(a && b, format!("λ=0.3: {da}; λ=0.7: {db}"))
}

fn c3_resequencing_optimum() -> Outcome {
    let skew = cli(&["optimize", "--mu2", "1.2", "--mu3", "0.8", "--lambda", "1.0"]);
    let sym = cli(&["optimize", "--mu2", "0.9", "--mu3", "0.9", "--lambda", "1.0"]);
    let (p, t, ps) = (num(&skew.result["p"]), num(&skew.result["theta_star"]), num(&sym.result["p"]));
    let ok = (p - 0.7).abs() <= 1e-9 && (t - 0.5).abs() <= 1e-9 && (ps - 0.5).abs() <= 1e-9 && skew.secs < 1.0 && sym.secs < 1.0;
    Outcome::new(ok, format!("p*={p}, θ*={t}; symmetric p*={ps} ({:.2}s, {:.2}s)", skew.secs, sym.secs))
}

fn c4_resequencing_crosscheck() -> Outcome {
    let (ok, d) = crosscheck(&["--builtin", "resequencing", "--mu2", "1.2", "--mu3", "0.8", "--lambda", "1.0", "--p", "0.7"], 0.5, 180.0);
    Outcome::new(ok, d)
}

fn points(run: &Cli) -> Vec<Value> {
    run.result["curve"]["points"].as_array().cloned().unwrap_or_default()
}

fn c5_block_mgf_fidelity() -> Outcome {
    let run = cli(&[
        "mgf", "--builtin", "single_server", "--mu", "1", "--block", "1", "--n", "64", "--replicas", "100000", "--theta-max", "0.7",
        "--points", "8",
    ]);
    let mut ok = run.code == Some(0);
    let (mut worst, mut hw_half, mut checked) = (0.0f64, f64::NAN, 0);
    for p in points(&run) {
        let theta = num(&p["theta"]);
        if theta < 0.05 {
            continue;
        }
        // Exp(1) log-MGF.
        let exact = -(-theta).ln_1p();
        let (v, hw) = (num(&p["value"]), num(&p["half_width"]));
        ok &= (v - exact).abs() <= hw;
        worst = worst.max((v - exact).abs() / hw);
        if (theta - 0.5).abs() < 1e-9 {
            hw_half = hw;
        }
        checked += 1;
    }
    ok &= checked == 7 && hw_half < 0.02;
    Outcome::new(ok, format!("{checked} points, worst |Λ̂−Λ|/half-width {worst:.2}, half-width at θ=0.5 {hw_half:.4}"))
}

fn c6_sup_over_blocks() -> Outcome {
    // Λ_S is a limit in n. Near θ = 0 the block functions differ by O(θ), so
    // log E e^{θS_n} − nΛ_2 decays like e^{−n(Λ_2−Λ_1)}; at n = 64 that bias
    // is several CI widths. n = 512 puts the post-burn-in window past it.
    let base = ["mgf", "--builtin", "fork_join", "--mu1", "1.0", "--mu2", "0.8", "--mu3", "1.2", "--n", "512"];
    let s = cli(&[&base[..], &["--block", "S"]].concat());
    let blocks: Vec<Cli> = (1..=4).map(|l| cli(&[&base[..], &["--block", &l.to_string()]].concat())).collect();
    let mut ok = s.code == Some(0) && blocks.iter().all(|b| b.code == Some(0));
    let (mut worst, mut checked) = (0.0f64, 0);
    for (k, p) in points(&s).iter().enumerate() {
        if p["infinite"] == true {
            continue;
        }
        let best = blocks
            .iter()
            .map(|b| points(b)[k].clone())
            .max_by(|a, b| num(&a["value"]).total_cmp(&num(&b["value"])))
            .unwrap();
        let joint = num(&p["half_width"]).hypot(num(&best["half_width"]));
        let gap = (num(&p["value"]) - num(&best["value"])).abs();
        ok &= gap <= joint;
        worst = worst.max(gap / joint);
        checked += 1;
    }
    Outcome::new(ok && checked > 0, format!("{checked} θ points, worst |Λ̂_S − max_ℓ Λ̂_ℓ| / joint half-width {worst:.2}"))
}

fn mp(rng: &mut ChaCha8Rng) -> MaxPlus {
    // Multiples of 1/8: sums and maxima are exact.
    if rng.random_bool(0.125) {
        MaxPlus::Bottom
    } else {
        MaxPlus::Finite(rng.random_range(-512i32..=512) as f64 / 8.0)
    }
}

fn semiring_violations(rng: &mut ChaCha8Rng) -> usize {
    let mut bad = 0;
    for _ in 0..10_000 {
        let (a, b, c) = (mp(rng), mp(rng), mp(rng));
        let laws = [
            a.oplus(b).oplus(c) == a.oplus(b.oplus(c)),
            a.oplus(b) == b.oplus(a),
            a.oplus(a) == a,
            a.otimes(b).otimes(c) == a.otimes(b.otimes(c)),
            a.otimes(b) == b.otimes(a),
            a.otimes(b.oplus(c)) == a.otimes(b).oplus(a.otimes(c)),
            a.oplus(MaxPlus::ZERO) == a,
            a.otimes(MaxPlus::ONE) == a,
            a.otimes(MaxPlus::ZERO) == MaxPlus::ZERO,
        ];
        bad += laws.iter().filter(|&&l| !l).count();
        let m = |rng: &mut ChaCha8Rng| MaxPlusMatrix::from_entries(3, 3, (0..9).map(|_| mp(rng)).collect()).unwrap();
        let (x, y, z) = (m(rng), m(rng), m(rng));
        let assoc = x.otimes(&y).unwrap().otimes(&z).unwrap() == x.otimes(&y.otimes(&z).unwrap()).unwrap();
        let dist = x.otimes(&y.oplus(&z).unwrap()).unwrap() == x.otimes(&y).unwrap().oplus(&x.otimes(&z).unwrap()).unwrap();
        let unit = x.otimes(&MaxPlusMatrix::identity(3)).unwrap() == x;
        bad += [assoc, dist, unit].iter().filter(|&&l| !l).count();
    }
    bad
}

fn within(a: f64, bound: f64) -> bool {
    a <= bound + 1e-9 * (1.0 + bound.abs())
}

/// Monotonicity, all subadditivity splits and both envelopes on 1000 paths,
/// against windows built from explicit matrix products.
fn path_violations() -> (usize, usize) {
    let models: Vec<_> = BUILTINS.iter().map(|n| builtin(n, &BuiltinParams::default()).unwrap().0).collect();
    let factory = StreamFactory::new(2024);
    let horizon = 64;
    let (mut bad, mut splits) = (0, 0);
    for r in 0..1_000u64 {
        let model = &models[r as usize % models.len()];
        let path = simulate_s_recorded(model, horizon, &mut ReplicaStreams::new(&factory, r));
        let mats = path.matrices.as_ref().unwrap();
        let dim = model.dim();
        let mut w = vec![vec![f64::NEG_INFINITY; horizon + 1]; horizon + 1];
        for v in 0..=horizon {
            let mut d = MaxPlusMatrix::identity(dim);
            let mut acc = MaxPlus::Bottom;
            for u in (0..=v).rev() {
                acc = acc.oplus(d.otimes(&mats[u].1).unwrap().max_entry());
                w[u][v] = acc.to_f64();
                d = d.otimes(&mats[u].0).unwrap();
            }
        }
        for n in 0..=horizon {
            let upper: f64 = path.b_max[..=n].iter().sum();
            let ok = (path.s[n] - w[0][n]).abs() <= 1e-9 * (1.0 + w[0][n].abs())
                && path.b_max[0] <= path.s[n]
                && within(path.s[n], upper)
                && (n == horizon || path.s[n + 1] >= path.s[n]);
            bad += usize::from(!ok);
        }
        for n in 0..horizon {
            for m in 1..=horizon - n {
                bad += usize::from(!within(w[0][n + m], w[0][n] + w[n + 1][n + m]));
                splits += 1;
            }
        }
    }
    (bad, splits)
}

fn scc_violations(rng: &mut ChaCha8Rng) -> usize {
    let mut bad = 0;
    for case in 0..200 {
        let s = 1 + case % 7;
        let density = rng.random_range(0.05..0.6);
        let support: Vec<Vec<bool>> = (0..s).map(|i| (0..s).map(|j| i == j || rng.random::<f64>() < density).collect()).collect();
        // reach[i][j]: coordinate j depends on coordinate i, transitively.
        let mut reach: Vec<Vec<bool>> = (0..s).map(|i| (0..s).map(|j| i == j || support[j][i]).collect()).collect();
        for k in 0..s {
            for i in 0..s {
                for j in 0..s {
                    if reach[i][k] && reach[k][j] {
                        reach[i][j] = true;
                    }
                }
            }
        }
        let c = communication_classes(&Graph::from_support(&support));
        for i in 0..s {
            for j in 0..s {
                let (ci, cj) = (c.class_of[i], c.class_of[j]);
                let ok = (ci == cj) == (reach[i][j] && reach[j][i]) && c.order[ci][cj] == reach[i][j] && (!reach[i][j] || ci <= cj);
                bad += usize::from(!ok);
            }
        }
    }
    bad
}

fn convexity_violations() -> usize {
    let params = MgfParams { replicas: 10_000, ..MgfParams::default() };
    let mut bad = 0;
    for name in BUILTINS {
        let m = builtin(name, &BuiltinParams::default()).unwrap().0;
        let grid = theta_grid(eta_of(&m).unwrap(), Some(1.0), 8);
        let classes = classes_of(&m);
        let factory = StreamFactory::new(77);
        bad += lambda_s_empirical(&m, &grid, &params, &factory).unwrap().convexity_violations(3.0).len();
        for l in 0..classes.len() {
            let c = lambda_block_empirical(&m, &classes, l, &grid, &params, &factory.derive(l as u64 + 1)).unwrap();
            bad += c.convexity_violations(3.0).len();
        }
    }
    bad
}

fn determinism_violations() -> usize {
    let cases: [&[&str]; 4] = [
        &["simulate", "--builtin", "fork_join", "--replicas", "5000", "--seed", "3"],
        &["mgf", "--builtin", "resequencing", "--replicas", "5000", "--points", "6", "--seed", "3"],
        &["theta", "--builtin", "tandem_independent", "--method", "empirical-only", "--mgf-replicas", "5000", "--points", "8"],
        &["tailfit", "--builtin", "single_server", "--replicas", "20000", "--quantile-window", "0.9,0.995"],
    ];
    let mut bad = 0;
    for args in cases {
        let one = cli(&[&["--threads", "1"][..], args].concat());
        let four = cli(&[&["--threads", "4"][..], args].concat());
        let again = cli(&[&["--threads", "4"][..], args].concat());
        bad += usize::from(one.code != Some(0) || one.stdout != four.stdout || four.stdout != again.stdout);
    }
    bad
}

fn c7_property_suites() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let semiring = semiring_violations(&mut rng);
    let (paths, splits) = path_violations();
    let scc = scc_violations(&mut rng);
    let convex = convexity_violations();
    let determinism = determinism_violations();
    let total = semiring + paths + scc + convex + determinism;
    Outcome::new(
        total == 0,
        format!(
            "violations: semiring {semiring}, S paths {paths} ({splits} splits), SCC {scc}, convexity {convex}, thread determinism {determinism}"
        ),
    )
}

fn c8_legendre() -> Outcome {
    let cases = [("mm1", BuiltinParams { mu: Some(1.0), lambda: Some(0.5), ..BuiltinParams::default() }), (
        "tandem_independent",
        BuiltinParams { mu1: Some(1.0), mu2: Some(1.5), lambda: Some(0.5), ..BuiltinParams::default() },
    )];
    let mut ok = true;
    let mut parts = Vec::new();
    for (name, params) in cases {
        let m = builtin(name, &params).unwrap().0;
        let classes = classes_of(&m);
        let theta_star = solve(&m, &SolveOptions::default()).unwrap().theta_star;
        let lambda_s = |t: f64| {
            (0..classes.len()).map(|l| lambda_block_analytic(&m, &classes, l, t).unwrap_or(f64::INFINITY)).fold(f64::NEG_INFINITY, f64::max)
        };
        let r = legendre_cross_check(lambda_s, m.arrivals(), theta_star, &LegendreGrid::default());
        let good = r.applicable && (r.inf_ratio - theta_star).abs() <= 1e-3;
        ok &= good;
        parts.push(format!("{name}: inf Λ*(α)/α = {:.6} vs θ* = {theta_star:.6}", r.inf_ratio));
    }
    Outcome::new(ok, parts.join("; "))
}

fn c9_selftest() -> Outcome {
    let run = cli(&["selftest"]);
    let rows = run.result["models"].as_array().map_or(0, Vec::len);
    let ok = run.code == Some(0) && rows == 5 && run.secs < 900.0;
    let failing: Vec<String> = run.result["models"]
        .as_array()
        .into_iter()
        .flatten()
        .flat_map(|m| {
            ["analytic", "empirical", "tail"]
                .into_iter()
                .filter(|k| m[*k]["pass"] != true)
                .map(|k| format!("{}/{k}", m["model"].as_str().unwrap_or("?")))
                .collect::<Vec<_>>()
        })
        .collect();
    Outcome::new(ok, format!("exit {:?}, {rows} models, {:.0}s of 900s, failing: {failing:?}", run.code, run.secs))
}

type Criterion = (u32, &'static str, fn() -> Outcome);

const CRITERIA: [Criterion; 9] = [
    (1, "tandem phase transition", c1_tandem_phase_transition),
    (2, "tandem Monte Carlo cross-check", c2_tandem_crosscheck),
    (3, "resequencing optimum", c3_resequencing_optimum),
    (4, "resequencing simulation", c4_resequencing_crosscheck),
    (5, "block-MGF fidelity", c5_block_mgf_fidelity),
    (6, "sup over blocks", c6_sup_over_blocks),
    (7, "property suites", c7_property_suites),
    (8, "Legendre cross-check", c8_legendre),
    (9, "selftest", c9_selftest),
];

fn main() {
    let picked: Vec<u32> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    // `cargo test --workspace -- --list` and friends must not start the suite.
    if std::env::args().any(|a| a == "--list") {
        return;
    }
    let (mut failed, mut ran) = (Vec::new(), 0);
    for (id, name, check) in CRITERIA {
        if !picked.is_empty() && !picked.contains(&id) {
            continue;
        }
        let t = Instant::now();
        let out = check();
        ran += 1;
        let verdict = if out.pass { "PASS" } else { "FAIL" };
        println!("{verdict} criterion {id} ({name}): {} [{:.1}s]", out.detail, t.elapsed().as_secs_f64());
        if !out.pass {
            failed.push(id);
        }
    }
    println!("acceptance: {} of {ran} criteria pass; failing {failed:?}", ran - failed.len());
}
