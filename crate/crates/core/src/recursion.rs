//! Simulation of the recursion, the processes `S_n` and the maximal dater.
//!
//! Customer `n` draws `(A_n, B_n)` from its own position in the service
//! stream, and interarrival times come from a separate arrival stream, so
//! service and arrival randomness never interleave.

use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::{NetworkModel, StepSampler};
use crate::rng::{Purpose, RandomStream, StreamFactory};
use crate::semiring::{product_range, MaxPlus, MaxPlusMatrix};

/// The two streams owned by one replica.
pub struct ReplicaStreams {
    pub services: RandomStream,
    pub arrivals: RandomStream,
}

impl ReplicaStreams {
    pub fn new(factory: &StreamFactory, replica: u64) -> Self {
        ReplicaStreams {
            services: factory.stream(Purpose::Services, replica),
            arrivals: factory.stream(Purpose::Arrivals, replica),
        }
    }
}

/// One step `A ⊗ x ⊕ B ⊗ t` with freshly drawn `(A, B)`.
pub fn step<R: Rng + ?Sized>(model: &NetworkModel, state: &[MaxPlus], t_next: f64, rng: &mut R) -> Vec<MaxPlus> {
    let mut sampler = StepSampler::new(model);
    sampler.draw(rng);
    let mut out = vec![MaxPlus::Bottom; model.dim()];
    sampler.apply(state, MaxPlus::Finite(t_next), &mut out);
    out
}

/// `S_0..S_N` of one path in inverted time, with the ingredients the
/// pathwise invariants need. `-∞` encodes `⊥`.
#[derive(Clone, Debug, PartialEq)]
pub struct PathSample {
    pub horizon: usize,
    /// `s[n] = S_n`.
    pub s: Vec<f64>,
    /// `tau[n-1] = τ_n`, so `S^τ_n = Σ_{k<n} tau[k]`.
    pub tau: Vec<f64>,
    /// `b_max[k] = ⊕_i B_k^{(i)}`.
    pub b_max: Vec<f64>,
    /// `(A_k, B_k)` for `k = 0..=N` when recorded; `A_0` is drawn but unused.
    pub matrices: Option<Vec<(MaxPlusMatrix, MaxPlusMatrix)>>,
}

impl PathSample {
    pub fn s_tau(&self, n: usize) -> f64 {
        self.tau[..n].iter().sum()
    }
}

/// Runs `V_0 = B_0`, `V_{k} = A_{k} ⊗ V_{k-1} ⊕ B_{k}` and records
/// `S_k = ⊕_i V_k^{(i)}`.
pub fn simulate_s(model: &NetworkModel, n: usize, streams: &mut ReplicaStreams) -> PathSample {
    run_s(model, n, streams, false)
}

/// As [`simulate_s`], also keeping every realized matrix for oracles.
pub fn simulate_s_recorded(model: &NetworkModel, n: usize, streams: &mut ReplicaStreams) -> PathSample {
    run_s(model, n, streams, true)
}

fn run_s(model: &NetworkModel, n: usize, streams: &mut ReplicaStreams, record: bool) -> PathSample {
    let dim = model.dim();
    let mut sampler = StepSampler::new(model);
    let mut v = vec![MaxPlus::Bottom; dim];
    let mut next = vec![MaxPlus::Bottom; dim];
    let mut s = Vec::with_capacity(n + 1);
    let mut b_max = Vec::with_capacity(n + 1);
    let mut tau = Vec::with_capacity(n);
    let mut matrices = record.then(|| Vec::with_capacity(n + 1));
    for k in 0..=n {
        sampler.draw(&mut streams.services);
        if let Some(m) = matrices.as_mut() {
            m.push((sampler.a_matrix(), sampler.b_matrix()));
        }
        if k == 0 {
            sampler.b_into(&mut v);
        } else {
            sampler.apply(&v, MaxPlus::ONE, &mut next);
            std::mem::swap(&mut v, &mut next);
            tau.push(model.arrivals().sample(&mut streams.arrivals));
        }
        s.push(max_of(&v));
        b_max.push(sampler.b_raw().iter().fold(f64::NEG_INFINITY, |m, &b| m.max(b)));
    }
    PathSample { horizon: n, s, tau, b_max, matrices }
}

fn max_of(v: &[MaxPlus]) -> f64 {
    v.iter().fold(MaxPlus::Bottom, |acc, &x| acc.oplus(x)).to_f64()
}

/// `S_{[u,v]} = ⊕_i ⊕_{u≤k≤v} (D_{[k+1,v]} ⊗ B_k)^{(i)}` by explicit
/// matrix products. `matrices[k] = (A_k, B_k)`.
pub fn s_window_direct(matrices: &[(MaxPlusMatrix, MaxPlusMatrix)], u: usize, v: usize) -> Result<MaxPlus> {
    let a: Vec<MaxPlusMatrix> = matrices.iter().map(|(a, _)| a.clone()).collect();
    let mut acc = MaxPlus::Bottom;
    for k in u..=v {
        let d = product_range(&a, k + 1..v + 1)?;
        acc = acc.oplus(d.otimes(&matrices[k].1)?.max_entry());
    }
    Ok(acc)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct GammaEstimate {
    pub gamma: f64,
    pub se: f64,
    /// Mean interarrival time.
    pub a: f64,
    /// `γ̂ + 2·s.e. < a`.
    pub stable: bool,
    pub horizon: usize,
    pub replicas: usize,
}

/// Mean and standard error of `S_n / n` over independent paths.
pub fn estimate_gamma(model: &NetworkModel, n: usize, replicas: usize, factory: &StreamFactory) -> GammaEstimate {
    assert!(n >= 1 && replicas >= 1);
    let ratios: Vec<f64> = (0..replicas as u64)
        .into_par_iter()
        .map(|r| {
            let mut streams = ReplicaStreams::new(factory, r);
            growth_of_s(model, n, &mut streams.services) / n as f64
        })
        .collect();
    let (gamma, var) = crate::stats::mean_var(&ratios);
    let se = (var / replicas as f64).sqrt();
    let a = model.arrivals().mean();
    GammaEstimate { gamma, se, a, stable: gamma + 2.0 * se < a, horizon: n, replicas }
}

/// `S_n` without bookkeeping.
fn growth_of_s<R: Rng + ?Sized>(model: &NetworkModel, n: usize, rng: &mut R) -> f64 {
    let mut sampler = StepSampler::new(model);
    let dim = model.dim();
    let mut v = vec![MaxPlus::Bottom; dim];
    let mut next = vec![MaxPlus::Bottom; dim];
    sampler.draw(rng);
    sampler.b_into(&mut v);
    for _ in 0..n {
        sampler.draw(rng);
        sampler.apply(&v, MaxPlus::ONE, &mut next);
        std::mem::swap(&mut v, &mut next);
    }
    max_of(&v)
}

/// Products of the diagonal block of `A` on a set of coordinates.
pub struct BlockWalker<'m> {
    sampler: StepSampler<'m>,
    /// `(local_i, local_j, index into the sampler's support)`.
    entries: Vec<(usize, usize, usize)>,
    size: usize,
}

impl<'m> BlockWalker<'m> {
    pub fn new(model: &'m NetworkModel, coords: &[usize]) -> Self {
        let sampler = StepSampler::new(model);
        let local = |c: usize| coords.iter().position(|&x| x == c);
        let entries = sampler
            .a_support()
            .iter()
            .enumerate()
            .filter_map(|(n, &(i, j))| Some((local(i)?, local(j)?, n)))
            .collect();
        BlockWalker { sampler, entries, size: coords.len() }
    }

    pub fn size(&self) -> usize {
        self.size
    }

    /// Draws one step and sets `out = M ⊗ v` for the block `M`.
    #[inline]
    pub fn advance<R: Rng + ?Sized>(&mut self, rng: &mut R, v: &[MaxPlus], out: &mut [MaxPlus]) {
        self.sampler.draw(rng);
        out.fill(MaxPlus::Bottom);
        let vals = self.sampler.a_raw();
        for &(i, j, n) in &self.entries {
            out[i] = out[i].oplus(MaxPlus::from_ext(vals[n] + v[j].to_f64()));
        }
    }

    /// `M_{[1,n]}^{(i,j)}` in local coordinates.
    pub fn product_entry<R: Rng + ?Sized>(&mut self, rng: &mut R, n: usize, i: usize, j: usize) -> MaxPlus {
        let mut v = vec![MaxPlus::Bottom; self.size];
        let mut next = v.clone();
        v[j] = MaxPlus::ONE;
        for _ in 0..n {
            self.advance(rng, &v, &mut next);
            std::mem::swap(&mut v, &mut next);
        }
        v[i]
    }
}

/// Growth rate of a diagonal block, `M_{[1,n]}^{(i,i)} / n`, with `i` the
/// first coordinate of the block.
pub fn estimate_block_gamma(
    model: &NetworkModel,
    coords: &[usize],
    n: usize,
    replicas: usize,
    factory: &StreamFactory,
) -> (f64, f64) {
    let vals: Vec<f64> = (0..replicas as u64)
        .into_par_iter()
        .map(|r| {
            let mut rng = factory.stream(Purpose::Services, r);
            BlockWalker::new(model, coords).product_entry(&mut rng, n, 0, 0).to_f64() / n as f64
        })
        .collect();
    let (m, v) = crate::stats::mean_var(&vals);
    (m, (v / replicas as f64).sqrt())
}

/// One realization of the stationary maximal dater.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct DaterSample {
    pub z: f64,
    pub horizon_used: u64,
    pub converged: bool,
}

/// Truncation controls for the backward supremum.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DaterConfig {
    /// Overrides `30·max(1, 1/(a − γ̂))`.
    pub margin: Option<f64>,
    pub n_min: u64,
    pub max_horizon: u64,
    /// Steps per drift window of the instability detector.
    pub drift_window: u64,
    pub pilot_horizon: usize,
    pub pilot_replicas: usize,
    /// Skip the pilot stability verdict (the drift detector still runs).
    pub force: bool,
}

impl Default for DaterConfig {
    fn default() -> Self {
        DaterConfig {
            margin: None,
            n_min: 64,
            max_horizon: 1_000_000,
            drift_window: 10_000,
            pilot_horizon: 2_000,
            pilot_replicas: 32,
            force: false,
        }
    }
}

/// Stopping margin and the pilot it came from.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct DaterPlan {
    pub margin: f64,
    pub pilot: GammaEstimate,
}

pub fn plan_daters(model: &NetworkModel, config: &DaterConfig, factory: &StreamFactory) -> Result<DaterPlan> {
    let pilot = estimate_gamma(model, config.pilot_horizon, config.pilot_replicas, &factory.derive(Purpose::Pilot as u64));
    if !pilot.stable && !config.force {
        return Err(Error::Unstable(format!(
            "Lyapunov exponent estimate {:.6} (s.e. {:.2e}) is not below the mean interarrival time {:.6}",
            pilot.gamma, pilot.se, pilot.a
        )));
    }
    let gap = pilot.a - pilot.gamma;
    let margin = match config.margin {
        Some(m) => m,
        None if gap > 0.0 => 30.0 * f64::max(1.0, 1.0 / gap),
        None => 30.0,
    };
    Ok(DaterPlan { margin, pilot })
}

/// `Z = sup_{n≥0} (S_n − S^τ_n)` by a backward row recursion: with
/// `r_0 = 0ᵀ`, customer `−n` contributes `r_n ⊗ B` and then
/// `r_{n+1} = r_n ⊗ A`.
pub fn sample_z(
    model: &NetworkModel,
    streams: &mut ReplicaStreams,
    margin: f64,
    config: &DaterConfig,
) -> Result<DaterSample> {
    let dim = model.dim();
    let mut sampler = StepSampler::new(model);
    let mut r = vec![0.0; dim];
    let mut next = vec![f64::NEG_INFINITY; dim];
    let mut s_tau = 0.0;
    let mut best = f64::NEG_INFINITY;
    let (mut window_sum, mut window_len, mut last_mean) = (0.0, 0u64, f64::NAN);
    let mut n: u64 = 0;
    loop {
        sampler.draw(&mut streams.services);
        let w = sampler.left_dot_b(&r) - s_tau;
        if w > best {
            best = w;
        }
        if n >= config.n_min && w < best - margin * (1.0 + (n as f64).sqrt()) {
            return Ok(DaterSample { z: best.max(0.0), horizon_used: n, converged: true });
        }
        if n >= config.max_horizon {
            return Ok(DaterSample { z: best.max(0.0), horizon_used: n, converged: false });
        }
        if n >= config.n_min {
            window_sum += w;
            window_len += 1;
            if window_len == config.drift_window {
                let mean = window_sum / window_len as f64;
                if mean > last_mean {
                    return Err(Error::Unstable(format!(
                        "running mean of S_n - S^tau_n rose from {last_mean:.3} to {mean:.3} over {} steps ending at n = {n}",
                        config.drift_window
                    )));
                }
                last_mean = mean;
                window_sum = 0.0;
                window_len = 0;
            }
        }
        sampler.apply_left(&r, &mut next);
        std::mem::swap(&mut r, &mut next);
        s_tau += model.arrivals().sample(&mut streams.arrivals);
        n += 1;
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct DaterBatch {
    pub plan: DaterPlan,
    pub samples: Vec<DaterSample>,
}

impl DaterBatch {
    pub fn censored(&self) -> usize {
        self.samples.iter().filter(|d| !d.converged).count()
    }

    /// Values of the converged daters.
    pub fn converged_values(&self) -> Vec<f64> {
        self.samples.iter().filter(|d| d.converged).map(|d| d.z).collect()
    }
}

/// `replicas` i.i.d. daters; replica `r` reads streams `r` of `factory`.
pub fn sample_daters(model: &NetworkModel, replicas: usize, factory: &StreamFactory, config: &DaterConfig) -> Result<DaterBatch> {
    let plan = plan_daters(model, config, factory)?;
    let samples = (0..replicas as u64)
        .into_par_iter()
        .map(|r| sample_z(model, &mut ReplicaStreams::new(factory, r), plan.margin, config))
        .collect::<Result<Vec<_>>>()?;
    Ok(DaterBatch { plan, samples })
}
