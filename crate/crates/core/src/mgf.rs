//! Scaled cumulant generating functions.
//!
//! `Λ_T` and simple block functions have closed forms. Everything else is
//! estimated from simulated products. The default estimator is a
//! population-dynamics (cloning) scheme: `R` particles advance the chain
//! one step at a time, each is weighted by `e^{θ·increment}` and the
//! population is resampled in proportion to the weights. The product of
//! per-step mean weights is an unbiased estimate of `E[e^{θX_n}]`, and the
//! mean weight after burn-in estimates the growth rate `Λ(θ)` itself.

use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::{ArrivalSpec, Distribution, Entry, NetworkModel, StepSampler, Term};
use crate::recursion::BlockWalker;
use crate::rng::{Purpose, StreamFactory};
use crate::semiring::MaxPlus;
use crate::stats::{logsumexp, ser_ext};
use crate::structure::Classes;

const Z95: f64 = 1.959_963_984_540_054;

/// `Λ_T(θ) = log E[e^{θτ}]`.
pub fn lambda_t(arrivals: &ArrivalSpec, theta: f64) -> f64 {
    arrivals.log_mgf(theta)
}

/// Closed form of a block function: `Σ_k log E[e^{m_k θ X_k}]` over
/// independent factors, empty for a constant-zero diagonal.
#[derive(Clone, Debug, PartialEq)]
pub struct BlockFormula {
    pub factors: Vec<(Distribution, usize)>,
}

impl BlockFormula {
    pub fn eval(&self, theta: f64) -> f64 {
        self.factors.iter().map(|(d, m)| d.log_mgf(*m as f64 * theta)).sum()
    }

    /// `sup{θ : Λ(θ) < ∞}`.
    pub fn threshold(&self) -> f64 {
        self.factors.iter().map(|(d, m)| d.mgf_threshold() / *m as f64).fold(f64::INFINITY, f64::min)
    }
}

/// Laws of the factors of a term when its components are independent.
fn term_factors(model: &NetworkModel, term: &Term) -> Option<Vec<(Distribution, usize)>> {
    let mults = term.multiplicities();
    for (n, &(a, _)) in mults.iter().enumerate() {
        for &(b, _) in &mults[n + 1..] {
            let (ca, cb) = (model.components()[a].coin, model.components()[b].coin);
            if let (Some(x), Some(y)) = (ca, cb) {
                if x.coin == y.coin {
                    return None;
                }
            }
        }
    }
    Some(mults.into_iter().map(|(k, m)| (model.marginal(k), m)).collect())
}

/// Maximal terms under sub-multiset dominance.
fn dominant_terms(terms: &[Term]) -> Vec<&Term> {
    let mut out: Vec<&Term> = Vec::new();
    for t in terms {
        if terms.iter().any(|u| u != t && t.is_submultiset_of(u)) || out.contains(&t) {
            continue;
        }
        out.push(t);
    }
    out
}

/// Closed form for class `l`, available for a singleton class whose
/// diagonal is `0` or effectively one term of independent components.
pub fn block_formula(model: &NetworkModel, classes: &Classes, l: usize) -> Option<BlockFormula> {
    let members = classes.classes.get(l)?;
    if members.len() != 1 {
        return None;
    }
    let i = members[0];
    match model.a(i, i) {
        Entry::Zero => Some(BlockFormula { factors: Vec::new() }),
        Entry::NegInf => None,
        Entry::Poly(terms) => {
            let dom = dominant_terms(terms);
            if dom.len() != 1 {
                return None;
            }
            Some(BlockFormula { factors: term_factors(model, dom[0])? })
        }
    }
}

pub fn lambda_block_analytic(model: &NetworkModel, classes: &Classes, l: usize, theta: f64) -> Result<f64> {
    match block_formula(model, classes, l) {
        Some(f) => Ok(f.eval(theta)),
        None => Err(Error::NotAvailable(format!("class {} has no closed-form block function", l + 1))),
    }
}

/// `log Σ_i Σ_{terms} E[e^{θ·term}]`, an upper bound on
/// `log E[e^{θ ⊕_i B^{(i)}}]`; `None` when a term mixes coin-coupled
/// components.
pub fn b_envelope(model: &NetworkModel, theta: f64) -> Option<f64> {
    let mut logs = Vec::new();
    for i in 0..model.dim() {
        match model.b(i) {
            Entry::NegInf => {}
            Entry::Zero => logs.push(0.0),
            Entry::Poly(terms) => {
                for t in terms {
                    let f = term_factors(model, t)?;
                    logs.push(f.iter().map(|(d, m)| d.log_mgf(*m as f64 * theta)).sum());
                }
            }
        }
    }
    Some(logsumexp(&logs))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Estimator {
    /// Resampled particle population, one pass per θ.
    Cloning,
    /// Plain log-mean-exp over independent replicas of `X_n`, one pass
    /// for the whole grid.
    Independent,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MgfParams {
    pub n: usize,
    pub replicas: usize,
    /// Steps discarded before the growth rate is read off; `n/4` if unset.
    pub burn_in: Option<usize>,
    pub estimator: Estimator,
}

impl Default for MgfParams {
    fn default() -> Self {
        MgfParams { n: 64, replicas: 100_000, burn_in: None, estimator: Estimator::Cloning }
    }
}

impl MgfParams {
    fn burn(&self) -> usize {
        self.burn_in.unwrap_or(self.n / 4).min(self.n.saturating_sub(1))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct MgfPoint {
    pub theta: f64,
    /// Estimate of `Λ(θ)`.
    #[serde(serialize_with = "ser_ext")]
    pub value: f64,
    pub half_width: f64,
    /// `(1/n) log E[e^{θX_n}]`; for `S` an upper bound on `Λ_S(θ)`.
    #[serde(serialize_with = "ser_ext")]
    pub finite_n: f64,
    pub finite_n_half_width: f64,
    /// One sample dominated the weight mass under replica doubling.
    pub infinite: bool,
}

impl MgfPoint {
    fn zero(theta: f64) -> Self {
        MgfPoint { theta, value: 0.0, half_width: 0.0, finite_n: 0.0, finite_n_half_width: 0.0, infinite: false }
    }

    pub fn se(&self) -> f64 {
        self.half_width / Z95
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum MgfTarget {
    /// Class `class` (1-based) read at local block coordinates `(i, j)`.
    Block { class: usize, i: usize, j: usize },
    S,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MgfCurve {
    pub target: MgfTarget,
    pub estimator: Estimator,
    pub n_used: usize,
    pub replicas: usize,
    pub burn_in: usize,
    pub points: Vec<MgfPoint>,
}

impl MgfCurve {
    pub fn thetas(&self) -> Vec<f64> {
        self.points.iter().map(|p| p.theta).collect()
    }

    /// Largest grid θ before the first INFINITE point.
    pub fn last_finite_theta(&self) -> Option<f64> {
        self.points.iter().take_while(|p| !p.infinite).last().map(|p| p.theta)
    }

    /// Linear interpolation of `(lower, central, upper)` band at `θ`,
    /// `None` outside the grid or past an INFINITE point.
    pub fn band(&self, theta: f64) -> Option<(f64, f64, f64)> {
        let pts = &self.points;
        let k = pts.iter().position(|p| p.theta >= theta)?;
        let pick = |p: &MgfPoint| (p.value - p.half_width, p.value, p.value + p.half_width);
        if pts[..=k].iter().any(|p| p.infinite) {
            return None;
        }
        if pts[k].theta == theta || k == 0 {
            return (pts[k].theta == theta).then(|| pick(&pts[k]));
        }
        let (a, b) = (&pts[k - 1], &pts[k]);
        let t = (theta - a.theta) / (b.theta - a.theta);
        let (al, am, ah) = pick(a);
        let (bl, bm, bh) = pick(b);
        Some((al + t * (bl - al), am + t * (bm - am), ah + t * (bh - ah)))
    }

    /// Interior grid points where the curve exceeds the chord of its
    /// neighbours by more than `k` joint standard errors.
    pub fn convexity_violations(&self, k: f64) -> Vec<f64> {
        let pts: Vec<&MgfPoint> = self.points.iter().filter(|p| !p.infinite).collect();
        pts.windows(3)
            .filter(|w| {
                let (l, m, r) = (w[0], w[1], w[2]);
                let t = (m.theta - l.theta) / (r.theta - l.theta);
                let chord = (1.0 - t) * l.value + t * r.value;
                let se = (m.se().powi(2) + ((1.0 - t) * l.se()).powi(2) + (t * r.se()).powi(2)).sqrt();
                m.value > chord + k * se + 1e-12
            })
            .map(|w| w[1].theta)
            .collect()
    }
}

/// `points` values evenly spaced on `[0, 0.95·η]`, or on `[0, cap]` when
/// `η = ∞` or a cap is given.
pub fn theta_grid(eta: f64, cap: Option<f64>, points: usize) -> Vec<f64> {
    let top = match (cap, eta.is_finite()) {
        (Some(c), true) => c.min(0.95 * eta),
        (Some(c), false) => c,
        (None, true) => 0.95 * eta,
        (None, false) => 1.0,
    };
    let m = points.max(2) - 1;
    (0..=m).map(|k| top * k as f64 / m as f64).collect()
}

/// A Markov chain carrying an observable `X_k`.
trait Chain {
    fn dim(&self) -> usize;
    fn init<R: Rng + ?Sized>(&mut self, rng: &mut R, state: &mut [MaxPlus]) -> MaxPlus;
    fn advance<R: Rng + ?Sized>(&mut self, rng: &mut R, state: &[MaxPlus], out: &mut [MaxPlus]) -> MaxPlus;
}

struct SChain<'m> {
    sampler: StepSampler<'m>,
}

impl Chain for SChain<'_> {
    fn dim(&self) -> usize {
        self.sampler.model().dim()
    }

    fn init<R: Rng + ?Sized>(&mut self, rng: &mut R, state: &mut [MaxPlus]) -> MaxPlus {
        self.sampler.draw(rng);
        self.sampler.b_into(state);
        fold_max(state)
    }

    fn advance<R: Rng + ?Sized>(&mut self, rng: &mut R, state: &[MaxPlus], out: &mut [MaxPlus]) -> MaxPlus {
        self.sampler.draw(rng);
        self.sampler.apply(state, MaxPlus::ONE, out);
        fold_max(out)
    }
}

struct BlockChain<'m> {
    walker: BlockWalker<'m>,
    i: usize,
    j: usize,
}

impl Chain for BlockChain<'_> {
    fn dim(&self) -> usize {
        self.walker.size()
    }

    fn init<R: Rng + ?Sized>(&mut self, _rng: &mut R, state: &mut [MaxPlus]) -> MaxPlus {
        state.fill(MaxPlus::Bottom);
        state[self.j] = MaxPlus::ONE;
        state[self.i]
    }

    fn advance<R: Rng + ?Sized>(&mut self, rng: &mut R, state: &[MaxPlus], out: &mut [MaxPlus]) -> MaxPlus {
        self.walker.advance(rng, state, out);
        out[self.i]
    }
}

fn fold_max(v: &[MaxPlus]) -> MaxPlus {
    v.iter().fold(MaxPlus::Bottom, |acc, &x| acc.oplus(x))
}

/// Heavy-mass diagnostic: the largest weight carries over 90% of the mass
/// in the first half of the sample and in the whole sample.
fn dominated(log_w: &[f64]) -> bool {
    let share = |xs: &[f64]| {
        let top = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        1.0 / xs.iter().map(|x| (x - top).exp()).sum::<f64>()
    };
    let half = log_w.len() / 2;
    half >= 1 && share(&log_w[..half]) > 0.9 && share(log_w) > 0.9
}

/// Per-step statistics of the log weights `θΔ`.
struct StepStats {
    /// `log` of the mean weight.
    log_mean: f64,
    /// Relative variance of the mean weight, `var(w) / (R·mean²)`.
    rel_var: f64,
    heavy: bool,
}

fn step_stats(log_w: &[f64]) -> StepStats {
    let r = log_w.len() as f64;
    let top = log_w.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let (mut s1, mut s2) = (0.0, 0.0);
    for x in log_w {
        let e = (x - top).exp();
        s1 += e;
        s2 += e * e;
    }
    let log_mean = top + (s1 / r).ln();
    let rel = (s2 * r / (s1 * s1) - 1.0).max(0.0);
    StepStats { log_mean, rel_var: rel / (r - 1.0).max(1.0), heavy: 1.0 / s1 > 0.9 && dominated(log_w) }
}

fn cloning_point<C: Chain>(chain: &mut C, theta: f64, params: &MgfParams, factory: &StreamFactory) -> MgfPoint {
    let r = params.replicas;
    let d = chain.dim();
    let mut moves = factory.stream(Purpose::Services, 0);
    let mut resample_rng = factory.stream(Purpose::Resampling, 0);
    let mut states = vec![MaxPlus::Bottom; r * d];
    let mut spare = states.clone();
    let mut xs = vec![MaxPlus::Bottom; r];
    let mut spare_x = xs.clone();
    let mut log_w = vec![0.0; r];
    let mut scratch = vec![MaxPlus::Bottom; d];
    let mut stats: Vec<StepStats> = Vec::with_capacity(params.n + 1);

    for p in 0..r {
        xs[p] = chain.init(&mut moves, &mut states[p * d..(p + 1) * d]);
    }
    let mut weighted = !xs[0].is_bottom();
    if weighted {
        for p in 0..r {
            log_w[p] = theta * xs[p].to_f64();
        }
        stats.push(step_stats(&log_w));
        resample(&log_w, &mut resample_rng, &states, &xs, &mut spare, &mut spare_x, d);
        std::mem::swap(&mut states, &mut spare);
        std::mem::swap(&mut xs, &mut spare_x);
    }
    for _ in 1..=params.n {
        for p in 0..r {
            let x = chain.advance(&mut moves, &states[p * d..(p + 1) * d], &mut scratch);
            states[p * d..(p + 1) * d].copy_from_slice(&scratch);
            log_w[p] = match (xs[p], x) {
                (_, MaxPlus::Bottom) => 0.0,
                (MaxPlus::Bottom, MaxPlus::Finite(b)) => theta * b,
                (MaxPlus::Finite(a), MaxPlus::Finite(b)) => theta * (b - a),
            };
            xs[p] = x;
        }
        if !weighted && !xs[0].is_bottom() {
            weighted = true;
        }
        if weighted {
            stats.push(step_stats(&log_w));
            resample(&log_w, &mut resample_rng, &states, &xs, &mut spare, &mut spare_x, d);
            std::mem::swap(&mut states, &mut spare);
            std::mem::swap(&mut xs, &mut spare_x);
        } else {
            stats.push(StepStats { log_mean: 0.0, rel_var: 0.0, heavy: false });
        }
    }

    let n = params.n as f64;
    let finite_n = stats.iter().map(|s| s.log_mean).sum::<f64>() / n;
    let finite_n_hw = Z95 * stats.iter().map(|s| s.rel_var).sum::<f64>().sqrt() / n;
    let tail = &stats[stats.len() - (params.n - params.burn())..];
    let logs: Vec<f64> = tail.iter().map(|s| s.log_mean).collect();
    let top = logs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let scaled: Vec<f64> = logs.iter().map(|l| (l - top).exp()).collect();
    let (mean, var) = crate::stats::mean_var(&scaled);
    let value = top + mean.ln();
    let half_width = if scaled.len() >= 2 {
        Z95 * (var / scaled.len() as f64).sqrt() / mean
    } else {
        Z95 * tail[0].rel_var.sqrt()
    };
    MgfPoint {
        theta,
        value,
        half_width,
        finite_n,
        finite_n_half_width: finite_n_hw,
        infinite: stats.iter().any(|s| s.heavy),
    }
}

/// Systematic resampling proportional to `exp(log_w)`.
fn resample<R: Rng + ?Sized>(
    log_w: &[f64],
    rng: &mut R,
    states: &[MaxPlus],
    xs: &[MaxPlus],
    out_states: &mut [MaxPlus],
    out_xs: &mut [MaxPlus],
    d: usize,
) {
    let r = log_w.len();
    let top = log_w.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let total: f64 = log_w.iter().map(|l| (l - top).exp()).sum();
    let step = total / r as f64;
    let mut u = rng.random::<f64>() * step;
    let mut cum = 0.0;
    let mut src = 0;
    for dst in 0..r {
        while src < r - 1 && cum + (log_w[src] - top).exp() <= u {
            cum += (log_w[src] - top).exp();
            src += 1;
        }
        out_states[dst * d..(dst + 1) * d].copy_from_slice(&states[src * d..(src + 1) * d]);
        out_xs[dst] = xs[src];
        u += step;
    }
}

fn independent_curve<C, F>(make: F, thetas: &[f64], params: &MgfParams, factory: &StreamFactory) -> Vec<MgfPoint>
where
    C: Chain,
    F: Fn() -> C + Sync,
{
    let xs: Vec<MaxPlus> = (0..params.replicas as u64)
        .into_par_iter()
        .map(|r| {
            let mut chain = make();
            let mut rng = factory.stream(Purpose::Services, r);
            let d = chain.dim();
            let mut state = vec![MaxPlus::Bottom; d];
            let mut next = state.clone();
            let mut x = chain.init(&mut rng, &mut state);
            for _ in 0..params.n {
                x = chain.advance(&mut rng, &state, &mut next);
                std::mem::swap(&mut state, &mut next);
            }
            x
        })
        .collect();
    let n = params.n as f64;
    thetas
        .iter()
        .map(|&theta| {
            if theta == 0.0 {
                return MgfPoint::zero(0.0);
            }
            let log_w: Vec<f64> = xs.iter().map(|x| theta * x.to_f64()).collect();
            let st = step_stats(&log_w);
            let value = st.log_mean / n;
            let hw = Z95 * st.rel_var.sqrt() / n;
            MgfPoint { theta, value, half_width: hw, finite_n: value, finite_n_half_width: hw, infinite: st.heavy }
        })
        .collect()
}

fn cloning_curve<C, F>(make: F, thetas: &[f64], params: &MgfParams, factory: &StreamFactory) -> Vec<MgfPoint>
where
    C: Chain,
    F: Fn() -> C + Sync,
{
    thetas
        .par_iter()
        .enumerate()
        .map(|(k, &theta)| {
            if theta == 0.0 {
                MgfPoint::zero(0.0)
            } else {
                cloning_point(&mut make(), theta, params, &factory.derive(k as u64 + 1))
            }
        })
        .collect()
}

fn check_params(params: &MgfParams, thetas: &[f64]) -> Result<()> {
    if params.n == 0 || params.replicas < 2 {
        return Err(Error::Invalid("estimation needs n >= 1 and at least 2 replicas".into()));
    }
    if thetas.windows(2).any(|w| w[1] <= w[0]) || thetas.iter().any(|t| *t < 0.0 || !t.is_finite()) {
        return Err(Error::Invalid("θ grid must be finite, non-negative and increasing".into()));
    }
    Ok(())
}

/// Empirical `Λ_ℓ` at local block coordinates `(i, j)`; `(0, 0)` is the
/// smallest coordinate of the class.
pub fn lambda_block_empirical_at(
    model: &NetworkModel,
    classes: &Classes,
    l: usize,
    (i, j): (usize, usize),
    thetas: &[f64],
    params: &MgfParams,
    factory: &StreamFactory,
) -> Result<MgfCurve> {
    check_params(params, thetas)?;
    let coords = classes
        .classes
        .get(l)
        .ok_or_else(|| Error::Invalid(format!("no class {} (model has {})", l + 1, classes.len())))?;
    if i >= coords.len() || j >= coords.len() {
        return Err(Error::Invalid(format!("class {} has {} coordinates", l + 1, coords.len())));
    }
    let make = || BlockChain { walker: BlockWalker::new(model, coords), i, j };
    let points = match params.estimator {
        Estimator::Cloning => cloning_curve(make, thetas, params, factory),
        Estimator::Independent => independent_curve(make, thetas, params, factory),
    };
    Ok(MgfCurve {
        target: MgfTarget::Block { class: l + 1, i: i + 1, j: j + 1 },
        estimator: params.estimator,
        n_used: params.n,
        replicas: params.replicas,
        burn_in: params.burn(),
        points,
    })
}

pub fn lambda_block_empirical(
    model: &NetworkModel,
    classes: &Classes,
    l: usize,
    thetas: &[f64],
    params: &MgfParams,
    factory: &StreamFactory,
) -> Result<MgfCurve> {
    lambda_block_empirical_at(model, classes, l, (0, 0), thetas, params, factory)
}

pub fn lambda_s_empirical(model: &NetworkModel, thetas: &[f64], params: &MgfParams, factory: &StreamFactory) -> Result<MgfCurve> {
    check_params(params, thetas)?;
    let make = || SChain { sampler: StepSampler::new(model) };
    let points = match params.estimator {
        Estimator::Cloning => cloning_curve(make, thetas, params, factory),
        Estimator::Independent => independent_curve(make, thetas, params, factory),
    };
    Ok(MgfCurve {
        target: MgfTarget::S,
        estimator: params.estimator,
        n_used: params.n,
        replicas: params.replicas,
        burn_in: params.burn(),
        points,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::Component;
    use crate::structure::classes_of;

    fn single(service: Distribution) -> NetworkModel {
        NetworkModel::new(None, vec![vec![Entry::component(0)]], vec![Entry::component(0)], vec![Component::new(service)], vec![], ArrivalSpec::poisson(0.5))
            .unwrap()
    }

    #[test]
    fn lambda_t_closed_forms() {
        assert!((lambda_t(&ArrivalSpec::poisson(1.0), -0.5) - (1.0f64 / 1.5).ln()).abs() < 1e-15);
        assert_eq!(lambda_t(&ArrivalSpec::Deterministic { value: 2.0 }, -0.25), -0.5);
        assert_eq!(lambda_t(&ArrivalSpec::Uniform { lo: 0.0, hi: 1.0 }, 0.0), 0.0);
    }

    #[test]
    fn block_closed_forms() {
        let m = single(Distribution::exponential(1.0));
        let c = classes_of(&m);
        assert!((lambda_block_analytic(&m, &c, 0, 0.5).unwrap() - 2f64.ln()).abs() < 1e-15);
        assert_eq!(block_formula(&m, &c, 0).unwrap().threshold(), 1.0);
    }

    #[test]
    fn dominated_terms_collapse() {
        let t = vec![Term::new(vec![0, 1]), Term::single(1), Term::new(vec![1, 0])];
        assert_eq!(dominant_terms(&t), vec![&Term::new(vec![0, 1])]);
    }

    #[test]
    fn deterministic_block_is_exact() {
        let m = single(Distribution::deterministic(1.25));
        let c = classes_of(&m);
        let params = MgfParams { n: 16, replicas: 64, ..MgfParams::default() };
        for est in [Estimator::Cloning, Estimator::Independent] {
            let p = MgfParams { estimator: est, ..params.clone() };
            let curve = lambda_block_empirical(&m, &c, 0, &[0.0, 0.5, 1.0], &p, &StreamFactory::new(1)).unwrap();
            for pt in &curve.points {
                assert!((pt.value - 1.25 * pt.theta).abs() < 1e-12, "{pt:?}");
                assert!(pt.half_width < 1e-12);
                assert!(!pt.infinite);
            }
        }
    }

    #[test]
    fn heavy_mass_flag() {
        let mut w = vec![0.0; 100];
        w[3] = 20.0;
        assert!(dominated(&w));
        w[3] = 1.0;
        assert!(!dominated(&w));
    }

    #[test]
    fn estimators_agree_on_light_exponential_block() {
        let m = single(Distribution::exponential(1.0));
        let c = classes_of(&m);
        let thetas = [0.0, 0.1, 0.2];
        for est in [Estimator::Cloning, Estimator::Independent] {
            let p = MgfParams { n: 16, replicas: 20_000, burn_in: None, estimator: est };
            let curve = lambda_block_empirical(&m, &c, 0, &thetas, &p, &StreamFactory::new(3)).unwrap();
            for pt in &curve.points[1..] {
                let truth = -(1.0 - pt.theta).ln();
                assert!((pt.value - truth).abs() < 4.0 * pt.se() + 1e-3, "{est:?} {pt:?} vs {truth}");
            }
        }
    }

    #[test]
    fn grid_shapes() {
        let g = theta_grid(0.8, None, 32);
        assert_eq!(g.len(), 32);
        assert_eq!(g[0], 0.0);
        assert!((g[31] - 0.76).abs() < 1e-15);
        assert_eq!(*theta_grid(f64::INFINITY, Some(3.0), 4).last().unwrap(), 3.0);
    }

    #[test]
    fn band_interpolates() {
        let curve = MgfCurve {
            target: MgfTarget::S,
            estimator: Estimator::Cloning,
            n_used: 1,
            replicas: 2,
            burn_in: 0,
            points: vec![
                MgfPoint::zero(0.0),
                MgfPoint { theta: 1.0, value: 1.0, half_width: 0.2, finite_n: 1.0, finite_n_half_width: 0.2, infinite: false },
            ],
        };
        let (lo, mid, hi) = curve.band(0.5).unwrap();
        assert!((lo - 0.4).abs() < 1e-15 && (mid - 0.5).abs() < 1e-15 && (hi - 0.6).abs() < 1e-15);
        assert!(curve.band(1.5).is_none());
    }
}
