use rand::Rng;

use rand_distr::Exp1;

use super::{Branch, Distribution, Entry, NetworkModel};
use crate::semiring::{MaxPlus, MaxPlusMatrix};

/// Entry evaluation grouped by shape so each group is a branch-free
/// gather loop. Constant entries are written once at construction and
/// never touched again. `out` indexes a buffer holding `A`'s support
/// followed by `B`.
#[derive(Clone, Debug, Default)]
struct Flat {
    consts: Vec<(u32, f64)>,
    singles: Vec<(u32, u32)>,
    pairs: Vec<(u32, u32, u32)>,
    /// `(out, t0, t1)`: entry `out` is the max over terms `t0..t1`.
    polys: Vec<(u32, u32, u32)>,
    /// Term `t` owns components `terms[t].0..terms[t].1` of `comps`.
    terms: Vec<(u32, u32)>,
    comps: Vec<u32>,
}

#[inline(always)]
fn fmax(a: f64, b: f64) -> f64 {
    if b > a {
        b
    } else {
        a
    }
}

impl Flat {
    fn push(&mut self, out: usize, e: &Entry) {
        let out = out as u32;
        match e {
            Entry::NegInf => self.consts.push((out, f64::NEG_INFINITY)),
            Entry::Zero => self.consts.push((out, 0.0)),
            Entry::Poly(terms) => match terms.as_slice() {
                [t] if t.components().is_empty() => self.consts.push((out, 0.0)),
                [t] if t.components().len() == 1 => self.singles.push((out, t.components()[0] as u32)),
                [t] if t.components().len() == 2 => {
                    self.pairs.push((out, t.components()[0] as u32, t.components()[1] as u32))
                }
                _ => {
                    let t0 = self.terms.len() as u32;
                    for t in terms {
                        let c0 = self.comps.len() as u32;
                        self.comps.extend(t.components().iter().map(|&k| k as u32));
                        self.terms.push((c0, self.comps.len() as u32));
                    }
                    self.polys.push((out, t0, self.terms.len() as u32));
                }
            },
        }
    }

    fn init(&self, out: &mut [f64]) {
        for &(o, v) in &self.consts {
            out[o as usize] = v;
        }
    }

    #[inline]
    fn eval_into(&self, sigma: &[f64], out: &mut [f64]) {
        for &(o, k) in &self.singles {
            out[o as usize] = sigma[k as usize];
        }
        for &(o, k, l) in &self.pairs {
            out[o as usize] = sigma[k as usize] + sigma[l as usize];
        }
        for &(o, t0, t1) in &self.polys {
            let mut best = f64::NEG_INFINITY;
            for &(c0, c1) in &self.terms[t0 as usize..t1 as usize] {
                let sum: f64 = self.comps[c0 as usize..c1 as usize].iter().map(|&k| sigma[k as usize]).sum();
                best = fmax(best, sum);
            }
            out[o as usize] = best;
        }
    }
}

/// A component law with the enum dispatch of [`super::Distribution`]
/// flattened; draws consume the generator exactly as `Distribution::sample`.
#[derive(Clone, Debug)]
enum Draw {
    Const(f64),
    Exp(f64),
    Unif(f64, f64),
    Bern(f64, Box<Draw>),
}

impl Draw {
    fn new(d: &Distribution) -> Self {
        match d {
            Distribution::Deterministic { value } => Draw::Const(*value),
            Distribution::Exponential { rate } => Draw::Exp(*rate),
            Distribution::Uniform { lo, hi } => Draw::Unif(*lo, hi - lo),
            Distribution::BernoulliModulated { p, inner } => Draw::Bern(*p, Box::new(Draw::new(inner))),
        }
    }

    #[inline]
    fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match self {
            Draw::Const(v) => *v,
            Draw::Exp(rate) => rng.sample::<f64, _>(Exp1) / rate,
            Draw::Unif(lo, w) => lo + w * rng.random::<f64>(),
            Draw::Bern(p, inner) => {
                if rng.random::<f64>() < *p {
                    inner.sample(rng)
                } else {
                    0.0
                }
            }
        }
    }
}

/// Reusable per-worker buffer for drawing `σ_n` and evaluating `(A_n, B_n)`
/// without allocating. Values are stored as extended reals, ⊥ as −∞.
#[derive(Clone, Debug)]
pub struct StepSampler<'m> {
    model: &'m NetworkModel,
    sigma: Vec<f64>,
    route_two: Vec<bool>,
    /// Per component: its law and the `(coin, branch is Two)` gate.
    draws: Vec<(Draw, Option<(usize, bool)>)>,
    coin_p: Vec<f64>,
    /// Row-major positions of the non-`-inf` entries of `A`.
    a_support: Vec<(usize, usize)>,
    a_index: Vec<(u32, u32)>,
    flat: Flat,
    /// `A` on its support, then `B`.
    vals: Vec<f64>,
}

impl<'m> StepSampler<'m> {
    pub fn new(model: &'m NetworkModel) -> Self {
        let s = model.dim();
        let a_support: Vec<(usize, usize)> = (0..s)
            .flat_map(|i| (0..s).map(move |j| (i, j)))
            .filter(|&(i, j)| !model.a(i, j).is_neg_inf())
            .collect();
        let na = a_support.len();
        let mut flat = Flat::default();
        for (n, &(i, j)) in a_support.iter().enumerate() {
            flat.push(n, model.a(i, j));
        }
        for i in 0..s {
            flat.push(na + i, model.b(i));
        }
        let draws = model
            .components()
            .iter()
            .map(|c| (Draw::new(&c.dist), c.coin.map(|r| (r.coin, r.branch == Branch::Two))))
            .collect();
        let mut vals = vec![f64::NEG_INFINITY; na + s];
        flat.init(&mut vals);
        let mut sampler = StepSampler {
            model,
            sigma: vec![0.0; model.num_components()],
            route_two: vec![false; model.coins().len()],
            draws,
            coin_p: model.coins().iter().map(|c| c.p).collect(),
            a_index: a_support.iter().map(|&(i, j)| (i as u32, j as u32)).collect(),
            a_support,
            flat,
            vals,
        };
        sampler.evaluate();
        sampler
    }

    pub fn model(&self) -> &'m NetworkModel {
        self.model
    }

    /// Draws a fresh component vector and evaluates every entry. Coins are
    /// tossed first, then the components in index order; gated-off
    /// components consume no draws.
    #[inline]
    pub fn draw<R: Rng + ?Sized>(&mut self, rng: &mut R) -> &[f64] {
        for (flag, &p) in self.route_two.iter_mut().zip(&self.coin_p) {
            *flag = rng.random::<f64>() < p;
        }
        for (x, (draw, gate)) in self.sigma.iter_mut().zip(&self.draws) {
            let active = match *gate {
                None => true,
                Some((coin, two)) => self.route_two[coin] == two,
            };
            *x = if active { draw.sample(rng) } else { 0.0 };
        }
        self.evaluate();
        &self.sigma
    }

    pub fn set_sigma(&mut self, sigma: &[f64]) {
        self.sigma.copy_from_slice(sigma);
        self.evaluate();
    }

    #[inline]
    fn evaluate(&mut self) {
        self.flat.eval_into(&self.sigma, &mut self.vals);
    }

    pub fn sigma(&self) -> &[f64] {
        &self.sigma
    }

    pub fn a(&self, i: usize, j: usize) -> MaxPlus {
        self.model.a(i, j).eval(&self.sigma)
    }

    #[inline]
    pub fn b(&self, i: usize) -> MaxPlus {
        MaxPlus::from_ext(self.b_raw()[i])
    }

    /// Current `B` as extended reals.
    #[inline]
    pub fn b_raw(&self) -> &[f64] {
        &self.vals[self.a_support.len()..]
    }

    pub fn b_into(&self, out: &mut [MaxPlus]) {
        for (o, &b) in out.iter_mut().zip(self.b_raw()) {
            *o = MaxPlus::from_ext(b);
        }
    }

    /// Positions of the structurally finite entries of `A`, row-major.
    pub fn a_support(&self) -> &[(usize, usize)] {
        &self.a_support
    }

    /// Current values aligned with [`StepSampler::a_support`], as extended reals.
    #[inline]
    pub fn a_raw(&self) -> &[f64] {
        &self.vals[..self.a_support.len()]
    }

    pub fn a_matrix(&self) -> MaxPlusMatrix {
        let s = self.model.dim();
        let mut m = MaxPlusMatrix::bottom(s, s);
        for (&(i, j), &v) in self.a_support.iter().zip(self.a_raw()) {
            m.set(i, j, MaxPlus::from_ext(v));
        }
        m
    }

    pub fn b_matrix(&self) -> MaxPlusMatrix {
        MaxPlusMatrix::column(self.b_raw().iter().map(|&b| MaxPlus::from_ext(b)).collect()).expect("s >= 1")
    }

    /// `out = A ⊗ x ⊕ B ⊗ t` for the current draw.
    #[inline]
    pub fn apply(&self, x: &[MaxPlus], t: MaxPlus, out: &mut [MaxPlus]) {
        let t = t.to_f64();
        for (o, &b) in out.iter_mut().zip(self.b_raw()) {
            *o = MaxPlus::from_ext(b + t);
        }
        for (&(i, j), &v) in self.a_index.iter().zip(self.a_raw()) {
            let (i, j) = (i as usize, j as usize);
            out[i] = out[i].oplus(MaxPlus::from_ext(v + x[j].to_f64()));
        }
    }

    /// `out = r ⊗ A` for a row vector `r` of extended reals.
    #[inline]
    pub fn apply_left(&self, r: &[f64], out: &mut [f64]) {
        out.fill(f64::NEG_INFINITY);
        for (&(i, j), &v) in self.a_index.iter().zip(self.a_raw()) {
            out[j as usize] = fmax(out[j as usize], r[i as usize] + v);
        }
    }

    /// `r ⊗ B` for a row vector `r` of extended reals.
    #[inline]
    pub fn left_dot_b(&self, r: &[f64]) -> f64 {
        r.iter().zip(self.b_raw()).fold(f64::NEG_INFINITY, |acc, (&ri, &b)| fmax(acc, ri + b))
    }
}

/// One i.i.d. realization `(A_n, B_n)`, with `B_n` as an `s×1` matrix.
pub fn sample_step<R: Rng + ?Sized>(model: &NetworkModel, rng: &mut R) -> (MaxPlusMatrix, MaxPlusMatrix) {
    let mut sampler = StepSampler::new(model);
    sampler.draw(rng);
    (sampler.a_matrix(), sampler.b_matrix())
}
