//! Decay rates: `η`, the per-class `θ^ℓ` and `θ* = min(η, θ^1, …, θ^d)`.

use serde::{Serialize, Serializer};

use crate::error::{Error, Result};
use crate::mgf::{
    block_formula, lambda_block_empirical, lambda_t, theta_grid, MgfCurve, MgfParams,
};
use crate::model::{check_unit_max_degree, ArrivalSpec, Distribution, Entry, NetworkModel, UnitDegreeReport};
use crate::rng::StreamFactory;
use crate::stats::ser_ext;
use crate::structure::{check_assumptions, classes_of, Classes};

/// Bisection stops once the bracket is narrower than this.
const ANALYTIC_TOL: f64 = 1e-12;
const MAX_BRACKET: f64 = 1e12;
const TIE_TOL: f64 = 1e-10;

/// Finiteness threshold of `⊕_i E[e^{θB^{(i)}}]`.
///
/// A term `Σ_k m_k σ^{(k)}` is finite iff each `E[e^{m_k θ σ^{(k)}}]` is,
/// whether the members are independent or coupled through a routing coin,
/// so its threshold is `min_k thr_k / m_k`. Maxima and the outer `⊕` take
/// minima of thresholds.
pub fn eta_of(model: &NetworkModel) -> Result<f64> {
    let mut eta = f64::INFINITY;
    for e in model.b_entries() {
        if let Entry::Poly(terms) = e {
            for t in terms {
                for (k, m) in t.multiplicities() {
                    eta = eta.min(model.component_threshold(k) / m as f64);
                }
            }
        }
    }
    Ok(eta)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum RootFlag {
    /// `g < 0` on the whole search domain; the cap was returned.
    NoRoot,
    /// The empirical grid ended before `g` crossed zero.
    GridExhausted,
    /// Search stopped at the last grid point before an INFINITE estimate.
    CappedAtInfinite,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Root {
    #[serde(serialize_with = "ser_ext")]
    pub theta: f64,
    pub flag: Option<RootFlag>,
}

fn positive(g: f64) -> bool {
    !(g < 0.0)
}

/// Largest `θ` in `(0, hi)` with `g(θ) < 0`, assuming `{g < 0}` is an
/// interval starting at 0 and `g(hi) ≥ 0`. `None` if no negative value
/// was ever seen.
fn bisect<F: Fn(f64) -> f64>(g: &F, hi: f64, tol: f64) -> Option<f64> {
    let (mut lo, mut hi) = (0.0, hi);
    let mut seen = false;
    for _ in 0..400 {
        if hi - lo <= tol * hi.max(1.0) {
            break;
        }
        let mid = 0.5 * (lo + hi);
        if positive(g(mid)) {
            hi = mid;
        } else {
            lo = mid;
            seen = true;
        }
    }
    if !seen {
        // The bracket may have collapsed onto a tiny negative region.
        let probe = hi * 1e-6;
        if probe > 0.0 && !positive(g(probe)) {
            return Some(lo.max(probe));
        }
        return None;
    }
    Some(0.5 * (lo + hi))
}

/// Root of `g(θ) = Λ(θ) + Λ_T(−θ)` on `(0, cap)`.
///
/// `∞` and NaN values of `Λ` count as positive. Returns the cap, flagged,
/// when `g < 0` all the way up to it.
pub fn theta_from_lambda<F: Fn(f64) -> f64>(lambda: F, arrivals: &ArrivalSpec, cap: f64) -> Result<Root> {
    let g = |t: f64| lambda(t) + lambda_t(arrivals, -t);
    let hi = if cap.is_finite() {
        if !positive(g(cap)) {
            return Ok(Root { theta: cap, flag: Some(RootFlag::NoRoot) });
        }
        cap
    } else {
        let mut hi = 1.0;
        while !positive(g(hi)) {
            hi *= 2.0;
            if hi > MAX_BRACKET {
                return Ok(Root { theta: f64::INFINITY, flag: Some(RootFlag::NoRoot) });
            }
        }
        hi
    };
    match bisect(&g, hi, ANALYTIC_TOL) {
        Some(theta) => Ok(Root { theta, flag: None }),
        None => Err(Error::NoDecayRegion(
            "Λ(θ) + Λ_T(−θ) ≥ 0 for every tested θ > 0; the class is unstable".into(),
        )),
    }
}

/// Root interval of an estimated curve: the point comes from the central
/// curve, `lo` from the upper band and `hi` from the lower band.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct EmpiricalRoot {
    #[serde(serialize_with = "ser_ext")]
    pub theta: f64,
    #[serde(serialize_with = "ser_ext")]
    pub lo: f64,
    #[serde(serialize_with = "ser_ext")]
    pub hi: f64,
    pub flag: Option<RootFlag>,
}

pub fn theta_from_curve(curve: &MgfCurve, arrivals: &ArrivalSpec, cap: f64) -> Result<EmpiricalRoot> {
    let top = curve.points.last().map(|p| p.theta).unwrap_or(0.0);
    let any_infinite = curve.points.iter().any(|p| p.infinite);
    let end = if any_infinite { curve.last_finite_theta().unwrap_or(0.0) } else { top }.min(cap);
    if end <= 0.0 {
        return Err(Error::NoDecayRegion("the estimated curve has no finite positive grid point".into()));
    }
    let solve_one = |pick: fn((f64, f64, f64)) -> f64| -> (Option<f64>, Option<RootFlag>) {
        let g = |t: f64| curve.band(t).map_or(f64::INFINITY, |b| pick(b) + lambda_t(arrivals, -t));
        if !positive(g(end)) {
            return if any_infinite && end < cap {
                (Some(end), Some(RootFlag::CappedAtInfinite))
            } else {
                (Some(cap), Some(RootFlag::GridExhausted))
            };
        }
        (bisect(&g, end, ANALYTIC_TOL), None)
    };
    let (mid, flag) = solve_one(|b| b.1);
    let theta = mid.ok_or_else(|| {
        Error::NoDecayRegion("estimated Λ(θ) + Λ_T(−θ) ≥ 0 at every grid θ > 0; unstable or too few replicas".into())
    })?;
    let lo = solve_one(|b| b.2).0.unwrap_or(0.0);
    let hi = solve_one(|b| b.0).0.unwrap_or(theta).max(theta);
    Ok(EmpiricalRoot { theta, lo: lo.min(theta), hi, flag })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SolveMethod {
    AnalyticFirst,
    EmpiricalOnly,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum RateMethod {
    Analytic,
    Empirical,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SolveOptions {
    pub method: SolveMethod,
    pub mgf: MgfParams,
    /// Points in the θ grid of each empirical curve.
    pub grid_points: usize,
    /// Upper end of the empirical grid when `η = ∞`.
    pub theta_max: Option<f64>,
    /// Replaces the computed `η`.
    pub eta_override: Option<f64>,
    /// Draws for the sampled `(SP)` check.
    pub sp_samples: usize,
    pub seed: u64,
}

impl Default for SolveOptions {
    fn default() -> Self {
        SolveOptions {
            method: SolveMethod::AnalyticFirst,
            mgf: MgfParams::default(),
            grid_points: 32,
            theta_max: None,
            eta_override: None,
            sp_samples: 1000,
            seed: 0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ClassRate {
    /// 1-based class index.
    pub class: usize,
    /// 1-based coordinates.
    pub coordinates: Vec<usize>,
    #[serde(serialize_with = "ser_ext")]
    pub theta: f64,
    #[serde(serialize_with = "ser_ext")]
    pub lo: f64,
    #[serde(serialize_with = "ser_ext")]
    pub hi: f64,
    pub method: RateMethod,
    pub flag: Option<RootFlag>,
    #[serde(skip)]
    pub curve: Option<MgfCurve>,
}

/// Which term of `min(η, θ^1, …)` attains `θ*`. Ties go to `η`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Binding {
    Eta,
    Class(usize),
}

impl Serialize for Binding {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            Binding::Eta => s.serialize_str("eta"),
            Binding::Class(l) => s.serialize_str(&format!("theta_{l}")),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DecayReport {
    #[serde(serialize_with = "ser_ext")]
    pub eta: f64,
    /// `η` as used in the min; `∞` when the unit-degree corollary holds.
    #[serde(serialize_with = "ser_ext")]
    pub eta_effective: f64,
    pub corollary: UnitDegreeReport,
    pub theta_by_class: Vec<ClassRate>,
    #[serde(serialize_with = "ser_ext")]
    pub theta_star: f64,
    #[serde(serialize_with = "ser_ext")]
    pub theta_star_lo: f64,
    #[serde(serialize_with = "ser_ext")]
    pub theta_star_hi: f64,
    pub binding: Binding,
    pub diagnostics: Vec<String>,
}

pub fn solve(model: &NetworkModel, options: &SolveOptions) -> Result<DecayReport> {
    let verdicts = check_assumptions(model, options.sp_samples, options.seed);
    if !verdicts.st {
        return Err(Error::Invalid("(ST) fails: a diagonal entry is -inf".into()));
    }
    if !verdicts.sp {
        return Err(Error::Invalid("(SP) fails: A ⊗ 0 differs from B ⊕ 0 on a sampled draw".into()));
    }
    let eta = match options.eta_override {
        Some(e) => e,
        None => eta_of(model)?,
    };
    if !(eta > 0.0) {
        return Err(Error::Invalid(format!("(LT) fails: η = {eta}")));
    }
    let corollary = check_unit_max_degree(model);
    let eta_effective = if corollary.holds && options.eta_override.is_none() { f64::INFINITY } else { eta };
    let classes = classes_of(model);
    let mut diagnostics = Vec::new();
    if corollary.holds {
        diagnostics.push("unit maximum degree holds: η cannot bind".into());
    }

    let factory = StreamFactory::new(options.seed);
    let mut rates = Vec::with_capacity(classes.len());
    for l in 0..classes.len() {
        let rate = class_rate(model, &classes, l, eta, eta_effective, options, &factory)?;
        if let Some(flag) = rate.flag {
            diagnostics.push(format!("class {}: {}", l + 1, flag_note(flag)));
        }
        rates.push(rate);
    }

    let min_class = rates.iter().map(|r| r.theta).fold(f64::INFINITY, f64::min);
    // A class root that meets η within bisection tolerance is a tie.
    let (theta_star, binding) = if eta_effective <= min_class + TIE_TOL * min_class.abs().max(1.0) {
        (eta_effective, Binding::Eta)
    } else {
        let l = rates.iter().position(|r| r.theta == min_class).unwrap();
        (min_class, Binding::Class(l + 1))
    };
    let theta_star_lo = rates.iter().map(|r| r.lo).fold(eta_effective, f64::min);
    let theta_star_hi = rates.iter().map(|r| r.hi).fold(eta_effective, f64::min);
    Ok(DecayReport {
        eta,
        eta_effective,
        corollary,
        theta_by_class: rates,
        theta_star,
        theta_star_lo,
        theta_star_hi,
        binding,
        diagnostics,
    })
}

fn flag_note(flag: RootFlag) -> &'static str {
    match flag {
        RootFlag::NoRoot => "Λ(θ)+Λ_T(−θ) < 0 up to the cap; the cap is reported",
        RootFlag::GridExhausted => "estimated curve stays below the root line on the whole grid; η is reported",
        RootFlag::CappedAtInfinite => "estimate diverges before the root; capped at the last finite grid point",
    }
}

fn class_rate(
    model: &NetworkModel,
    classes: &Classes,
    l: usize,
    eta: f64,
    cap: f64,
    options: &SolveOptions,
    factory: &StreamFactory,
) -> Result<ClassRate> {
    let coordinates = classes.classes[l].iter().map(|i| i + 1).collect();
    let formula = match options.method {
        SolveMethod::AnalyticFirst => block_formula(model, classes, l),
        SolveMethod::EmpiricalOnly => None,
    };
    if let Some(f) = formula {
        let root = theta_from_lambda(|t| f.eval(t), model.arrivals(), cap)
            .map_err(|e| Error::NoDecayRegion(format!("class {}: {e}", l + 1)))?;
        return Ok(ClassRate {
            class: l + 1,
            coordinates,
            theta: root.theta,
            lo: root.theta,
            hi: root.theta,
            method: RateMethod::Analytic,
            flag: root.flag,
            curve: None,
        });
    }
    let grid = theta_grid(eta, options.theta_max, options.grid_points);
    let curve = lambda_block_empirical(model, classes, l, &grid, &options.mgf, &factory.derive(l as u64 + 1))?;
    let root = theta_from_curve(&curve, model.arrivals(), cap)
        .map_err(|e| Error::NoDecayRegion(format!("class {}: {e}", l + 1)))?;
    Ok(ClassRate {
        class: l + 1,
        coordinates,
        theta: root.theta,
        lo: root.lo,
        hi: root.hi,
        method: RateMethod::Empirical,
        flag: root.flag,
        curve: Some(curve),
    })
}

/// The two-path routing family: `ζ¹` at the splitter, `ζ²`/`ζ³` on the
/// paths, `P(path 2) = p`.
#[derive(Clone, Debug, PartialEq)]
pub struct RoutingFamily {
    pub zeta1: Distribution,
    pub zeta2: Distribution,
    pub zeta3: Distribution,
    pub arrivals: ArrivalSpec,
}

impl RoutingFamily {
    pub fn exponential(mu2: f64, mu3: f64, lambda: f64) -> Self {
        RoutingFamily {
            zeta1: Distribution::deterministic(0.0),
            zeta2: Distribution::exponential(mu2),
            zeta3: Distribution::exponential(mu3),
            arrivals: ArrivalSpec::poisson(lambda),
        }
    }

    /// `(μ₂, μ₃, λ)` when the closed form applies.
    fn closed_form(&self) -> Option<(f64, f64, f64)> {
        match (&self.zeta1, &self.zeta2, &self.zeta3, &self.arrivals) {
            (
                Distribution::Deterministic { value },
                Distribution::Exponential { rate: m2 },
                Distribution::Exponential { rate: m3 },
                ArrivalSpec::Exponential { rate: l },
            ) if *value == 0.0 => Some((*m2, *m3, *l)),
            _ => None,
        }
    }

    /// Open interval of `p` under which both paths are stable.
    pub fn admissible(&self) -> Option<(f64, f64)> {
        let a = self.arrivals.mean();
        if self.zeta1.mean() >= a {
            return None;
        }
        let (m2, m3) = (self.zeta2.mean(), self.zeta3.mean());
        let hi = if m2 > 0.0 { (a / m2).min(1.0) } else { 1.0 };
        let lo = if m3 > 0.0 { (1.0 - a / m3).max(0.0) } else { 0.0 };
        (lo < hi).then_some((lo, hi))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum RoutingMethod {
    ClosedForm,
    GoldenSection,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RoutingOptimum {
    pub p: f64,
    pub theta_star: f64,
    pub theta_2: f64,
    pub theta_3: f64,
    pub admissible: (f64, f64),
    pub method: RoutingMethod,
    /// The unconstrained optimum fell outside the admissible interval.
    pub clamped: bool,
}

/// Maximizes `θ*(p)`. `force_numeric` skips the closed form.
pub fn optimize_routing(family: &RoutingFamily, force_numeric: bool) -> Result<RoutingOptimum> {
    let admissible = family
        .admissible()
        .ok_or_else(|| Error::Infeasible("no routing probability stabilizes both paths".into()))?;
    let (lo, hi) = admissible;
    if let (Some((mu2, mu3, lambda)), false) = (family.closed_form(), force_numeric) {
        let raw = ((mu2 - mu3) / lambda + 1.0) / 2.0;
        let p = raw.clamp(lo, hi);
        let (t2, t3) = (mu2 - lambda * p, mu3 - lambda * (1.0 - p));
        let clamped = p != raw;
        let theta_star = if clamped { t2.min(t3).min(mu2.min(mu3)) } else { (mu2 + mu3 - lambda) / 2.0 };
        return Ok(RoutingOptimum {
            p,
            theta_star,
            theta_2: t2,
            theta_3: t3,
            admissible,
            method: RoutingMethod::ClosedForm,
            clamped,
        });
    }

    let eval = |p: f64| -> Result<(f64, f64, f64)> {
        let (model, _) = crate::library::resequencing_general(
            family.zeta1.clone(),
            family.zeta2.clone(),
            family.zeta3.clone(),
            p,
            family.arrivals.clone(),
        )?;
        let report = solve(&model, &SolveOptions { sp_samples: 64, ..SolveOptions::default() })?;
        let class_of = |coord: usize| {
            report.theta_by_class.iter().find(|r| r.coordinates.contains(&coord)).map_or(f64::INFINITY, |r| r.theta)
        };
        Ok((report.theta_star, class_of(2), class_of(3)))
    };
    let score = |p: f64| eval(p).map(|v| v.0).unwrap_or(f64::NEG_INFINITY);
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let (mut a, mut b) = (lo, hi);
    let mut c = b - inv_phi * (b - a);
    let mut d = a + inv_phi * (b - a);
    let (mut fc, mut fd) = (score(c), score(d));
    while b - a > 1e-11 {
        if fc >= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = score(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = score(d);
        }
    }
    let p = 0.5 * (a + b);
    let (theta_star, theta_2, theta_3) = eval(p)?;
    Ok(RoutingOptimum { p, theta_star, theta_2, theta_3, admissible, method: RoutingMethod::GoldenSection, clamped: false })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct LegendreReport {
    /// `inf_{α>0} Λ*(α)/α` on the grids.
    #[serde(serialize_with = "ser_ext")]
    pub inf_ratio: f64,
    #[serde(serialize_with = "ser_ext")]
    pub alpha_at_inf: f64,
    #[serde(serialize_with = "ser_ext")]
    pub theta_star: f64,
    pub tolerance: f64,
    pub agrees: bool,
    /// False when the infimum sits at an end of the α grid.
    pub applicable: bool,
    pub notes: Vec<String>,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LegendreGrid {
    pub theta_points: usize,
    pub alpha_points: usize,
    pub alpha_min: f64,
    pub alpha_max: f64,
    pub tolerance: f64,
}

impl Default for LegendreGrid {
    fn default() -> Self {
        LegendreGrid { theta_points: 1000, alpha_points: 4000, alpha_min: 1e-4, alpha_max: 1e4, tolerance: 1e-3 }
    }
}

/// Upper end of `{θ ≥ 0 : f(θ) < ∞}`, searched up to `limit`.
fn finite_domain_end<F: Fn(f64) -> f64>(f: &F, limit: f64) -> f64 {
    if f(limit).is_finite() {
        return limit;
    }
    let (mut lo, mut hi) = (0.0, limit);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if f(mid).is_finite() {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    lo
}

/// Rate-function form of the decay rate: with `h(θ) = Λ(θ) + Λ_T(−θ)`
/// and `Λ*(α) = sup_θ (θα − h(θ))`, returns `inf_{α>0} Λ*(α)/α`.
pub fn legendre_cross_check<F: Fn(f64) -> f64>(
    lambda: F,
    arrivals: &ArrivalSpec,
    theta_star: f64,
    grid: &LegendreGrid,
) -> LegendreReport {
    let h = |t: f64| lambda(t) + lambda_t(arrivals, -t);
    let mut notes = Vec::new();
    let reach = if theta_star.is_finite() { (2.0 * theta_star).max(theta_star + 1.0) } else { 1.0 };
    let end = finite_domain_end(&h, reach);
    let top = if end < reach { end * (1.0 - 1e-9) } else { end };
    if theta_star.is_finite() && top <= theta_star * (1.0 + 1e-6) {
        notes.push("Λ is infinite just above θ*: the rate-function identity needs Λ(θ*+ε) < ∞".into());
    }
    let m = grid.theta_points.max(2) - 1;
    let table: Vec<(f64, f64)> = (0..=m)
        .map(|k| {
            let t = top * k as f64 / m as f64;
            (t, h(t))
        })
        .filter(|(_, v)| v.is_finite())
        .collect();
    let ratio = |alpha: f64| table.iter().map(|(t, v)| t - v / alpha).fold(f64::NEG_INFINITY, f64::max);
    let q = (grid.alpha_max / grid.alpha_min).ln() / (grid.alpha_points.max(2) - 1) as f64;
    let (mut best, mut best_alpha, mut best_k) = (f64::INFINITY, f64::NAN, 0);
    for k in 0..grid.alpha_points.max(2) {
        let alpha = grid.alpha_min * (q * k as f64).exp();
        let r = ratio(alpha);
        if r < best {
            best = r;
            best_alpha = alpha;
            best_k = k;
        }
    }
    let applicable = best_k != 0 && best_k != grid.alpha_points.max(2) - 1;
    if !applicable {
        notes.push("infimum at the edge of the α grid: the transform is degenerate for this input".into());
    }
    let agrees = applicable && (best - theta_star).abs() <= grid.tolerance;
    LegendreReport {
        inf_ratio: best,
        alpha_at_inf: best_alpha,
        theta_star,
        tolerance: grid.tolerance,
        agrees,
        applicable,
        notes,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{Component, Term};

    fn mm1_lambda(mu: f64) -> impl Fn(f64) -> f64 {
        move |t| Distribution::exponential(mu).log_mgf(t)
    }

    #[test]
    fn single_server_root() {
        let r = theta_from_lambda(mm1_lambda(1.0), &ArrivalSpec::poisson(0.5), f64::INFINITY).unwrap();
        assert!((r.theta - 0.5).abs() < 1e-9 && r.flag.is_none());
    }

    #[test]
    fn resequencing_block_two_root() {
        let (mu2, lambda, p) = (1.0, 0.6, 0.5);
        let d = Distribution::BernoulliModulated { p, inner: Box::new(Distribution::exponential(mu2)) };
        let r = theta_from_lambda(|t| d.log_mgf(t), &ArrivalSpec::poisson(lambda), f64::INFINITY).unwrap();
        assert!((r.theta - 0.7).abs() < 1e-9);
        let identity = (p * mu2 / (mu2 - 0.7) + 1.0 - p) * (lambda / (lambda + 0.7));
        assert!((identity - 1.0).abs() < 1e-12);
    }

    #[test]
    fn zero_block_returns_cap() {
        let r = theta_from_lambda(|_| 0.0, &ArrivalSpec::Deterministic { value: 1.0 }, 5.0).unwrap();
        assert_eq!(r, Root { theta: 5.0, flag: Some(RootFlag::NoRoot) });
    }

    #[test]
    fn unstable_has_no_region() {
        let e = theta_from_lambda(mm1_lambda(1.0), &ArrivalSpec::poisson(1.2), f64::INFINITY).unwrap_err();
        assert!(matches!(e, Error::NoDecayRegion(_)));
    }

    #[test]
    fn load_monotonicity() {
        let mut last = f64::INFINITY;
        for k in 1..=9 {
            let lambda = k as f64 / 10.0;
            let r = theta_from_lambda(mm1_lambda(1.0), &ArrivalSpec::poisson(lambda), f64::INFINITY).unwrap();
            assert!((r.theta - (1.0 - lambda)).abs() < 1e-9);
            assert!(r.theta < last);
            last = r.theta;
        }
    }

    fn tandem_shared(mu: f64, lambda: f64) -> NetworkModel {
        use Entry::*;
        NetworkModel::new(
            None,
            vec![vec![Entry::component(0), NegInf], vec![Entry::product(vec![0, 0]), Entry::component(0)]],
            vec![Entry::component(0), Entry::product(vec![0, 0])],
            vec![Component::new(Distribution::exponential(mu))],
            vec![],
            ArrivalSpec::poisson(lambda),
        )
        .unwrap()
    }

    #[test]
    fn eta_from_shared_component() {
        assert_eq!(eta_of(&tandem_shared(1.0, 0.4)).unwrap(), 0.5);
    }

    #[test]
    fn tandem_phase_transition() {
        for (lambda, want, eta_binds) in [(0.2, 0.5, true), (0.4, 0.5, true), (0.5, 0.5, true), (0.6, 0.4, false), (0.8, 0.2, false)] {
            let r = solve(&tandem_shared(1.0, lambda), &SolveOptions::default()).unwrap();
            assert!((r.theta_star - want).abs() < 1e-9, "λ={lambda}: {}", r.theta_star);
            assert_eq!(r.binding == Binding::Eta, eta_binds, "λ={lambda}");
        }
    }

    #[test]
    fn kink_is_continuous() {
        for d in [-1e-6, 1e-6] {
            let r = solve(&tandem_shared(1.0, 0.5 + d), &SolveOptions::default()).unwrap();
            assert!((r.theta_star - 0.5).abs() <= 2e-6);
        }
    }

    #[test]
    fn eta_override_caps() {
        let m = tandem_shared(1.0, 0.4);
        let r = solve(&m, &SolveOptions { eta_override: Some(0.25), ..SolveOptions::default() }).unwrap();
        assert_eq!(r.theta_star, 0.25);
    }

    #[test]
    fn empirical_tandem_close_to_analytic() {
        let m = tandem_shared(1.0, 0.7);
        let opts = SolveOptions {
            method: SolveMethod::EmpiricalOnly,
            mgf: MgfParams { replicas: 4000, ..MgfParams::default() },
            grid_points: 16,
            ..SolveOptions::default()
        };
        let r = solve(&m, &opts).unwrap();
        assert!((r.theta_star - 0.3).abs() < 0.03, "{}", r.theta_star);
        assert!(r.theta_star_lo <= r.theta_star && r.theta_star <= r.theta_star_hi);
        assert!(r.theta_by_class.iter().all(|c| c.method == RateMethod::Empirical));
    }

    #[test]
    fn routing_closed_form() {
        let o = optimize_routing(&RoutingFamily::exponential(1.2, 0.8, 1.0), false).unwrap();
        assert!((o.p - 0.7).abs() < 1e-9 && (o.theta_star - 0.5).abs() < 1e-9);
        let s = optimize_routing(&RoutingFamily::exponential(0.9, 0.9, 1.0), false).unwrap();
        assert!((s.p - 0.5).abs() < 1e-12);
        let e = optimize_routing(&RoutingFamily::exponential(0.5, 0.5, 1.0), false).unwrap_err();
        assert!(matches!(e, Error::Infeasible(_)));
    }

    #[test]
    fn routing_numeric_matches_closed_form() {
        let o = optimize_routing(&RoutingFamily::exponential(1.2, 0.8, 1.0), true).unwrap();
        assert_eq!(o.method, RoutingMethod::GoldenSection);
        assert!((o.p - 0.7).abs() < 1e-6, "{}", o.p);
        assert!((o.theta_star - 0.5).abs() < 1e-6);
    }

    #[test]
    fn legendre_mm1() {
        let r = legendre_cross_check(mm1_lambda(1.0), &ArrivalSpec::poisson(0.5), 0.5, &LegendreGrid::default());
        assert!(r.applicable && r.agrees, "{r:?}");
    }

    #[test]
    fn legendre_deterministic_degenerate() {
        let r = legendre_cross_check(
            |t| 0.5 * t,
            &ArrivalSpec::Deterministic { value: 1.0 },
            f64::INFINITY,
            &LegendreGrid::default(),
        );
        assert!(!r.applicable && !r.agrees);
    }

    #[test]
    fn sign_bracket() {
        for (mu, lambda) in [(1.0, 0.5), (2.0, 0.3), (1.5, 1.2)] {
            let f = mm1_lambda(mu);
            let arr = ArrivalSpec::poisson(lambda);
            let t = theta_from_lambda(&f, &arr, f64::INFINITY).unwrap().theta;
            let g = |x: f64| f(x) + lambda_t(&arr, -x);
            assert!(g(t / 2.0) < 0.0);
            let above = g(1.1 * t);
            assert!(!above.is_finite() || above > 0.0);
        }
    }

    #[test]
    fn term_threshold_with_repeats() {
        let m = NetworkModel::new(
            None,
            vec![vec![Entry::component(0)]],
            vec![Entry::max_of(vec![Term::new(vec![0, 0, 0]), Term::single(0)])],
            vec![Component::new(Distribution::exponential(3.0))],
            vec![],
            ArrivalSpec::poisson(0.1),
        );
        // B violates (SP) here; the threshold itself is still defined.
        assert_eq!(eta_of(&m.unwrap()).unwrap(), 1.0);
    }
}
