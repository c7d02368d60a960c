//! Symbolic stochastic (max,plus)-linear systems.
//!
//! Entries of `A` and `B` are expressions over a vector of component times
//! `σ = (σ¹..σᴷ)`, redrawn i.i.d. at every step. Components are 0-based
//! internally and 1-based in configs and reports.

mod config;
mod distribution;
mod sampler;

use std::fmt;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::semiring::MaxPlus;

pub use config::{model_to_json, parse_model};
pub use distribution::{ArrivalSpec, Distribution};
pub use sampler::{sample_step, StepSampler};

/// `⊗_{k∈term} σ^{(k)}`. Indices are sorted; repeats encode powers.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Term(Vec<usize>);

impl Term {
    pub fn new(mut components: Vec<usize>) -> Self {
        assert!(!components.is_empty(), "a term references at least one component");
        components.sort_unstable();
        Term(components)
    }

    pub fn single(k: usize) -> Self {
        Term(vec![k])
    }

    pub fn components(&self) -> &[usize] {
        &self.0
    }

    /// `(component, multiplicity)` pairs in increasing component order.
    pub fn multiplicities(&self) -> Vec<(usize, usize)> {
        let mut out: Vec<(usize, usize)> = Vec::new();
        for &k in &self.0 {
            match out.last_mut() {
                Some((last, m)) if *last == k => *m += 1,
                _ => out.push((k, 1)),
            }
        }
        out
    }

    pub fn has_repeats(&self) -> bool {
        self.0.windows(2).any(|w| w[0] == w[1])
    }

    /// Sub-multiset test: with non-negative σ, `self ⊆ other` implies
    /// `self(σ) ≤ other(σ)` pointwise.
    pub fn is_submultiset_of(&self, other: &Term) -> bool {
        let (mut i, mut j) = (0, 0);
        while i < self.0.len() {
            if j == other.0.len() {
                return false;
            }
            match self.0[i].cmp(&other.0[j]) {
                std::cmp::Ordering::Equal => {
                    i += 1;
                    j += 1;
                }
                std::cmp::Ordering::Greater => j += 1,
                std::cmp::Ordering::Less => return false,
            }
        }
        true
    }

    #[inline]
    pub fn eval(&self, sigma: &[f64]) -> f64 {
        self.0.iter().map(|&k| sigma[k]).sum()
    }
}

impl fmt::Display for Term {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (n, k) in self.0.iter().enumerate() {
            if n > 0 {
                write!(f, "⊗")?;
            }
            write!(f, "σ{}", k + 1)?;
        }
        Ok(())
    }
}

/// One symbolic matrix entry.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Entry {
    NegInf,
    Zero,
    /// `⊕_j term_j`, never empty.
    Poly(Vec<Term>),
}

impl Entry {
    pub fn component(k: usize) -> Self {
        Entry::Poly(vec![Term::single(k)])
    }

    pub fn product(components: Vec<usize>) -> Self {
        Entry::Poly(vec![Term::new(components)])
    }

    pub fn max_of(terms: Vec<Term>) -> Self {
        assert!(!terms.is_empty());
        Entry::Poly(terms)
    }

    pub fn is_neg_inf(&self) -> bool {
        matches!(self, Entry::NegInf)
    }

    #[inline]
    pub fn eval(&self, sigma: &[f64]) -> MaxPlus {
        match self {
            Entry::NegInf => MaxPlus::Bottom,
            Entry::Zero => MaxPlus::Finite(0.0),
            Entry::Poly(terms) => {
                let mut best = f64::NEG_INFINITY;
                for t in terms {
                    best = best.max(t.eval(sigma));
                }
                MaxPlus::Finite(best)
            }
        }
    }

    pub fn terms(&self) -> &[Term] {
        match self {
            Entry::Poly(t) => t,
            _ => &[],
        }
    }

    /// Exactly one term made of one component, returning it.
    pub fn as_single_component(&self) -> Option<usize> {
        match self {
            Entry::Poly(t) if t.len() == 1 && t[0].0.len() == 1 => Some(t[0].0[0]),
            _ => None,
        }
    }
}

impl fmt::Display for Entry {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Entry::NegInf => write!(f, "-inf"),
            Entry::Zero => write!(f, "0"),
            Entry::Poly(terms) => {
                for (n, t) in terms.iter().enumerate() {
                    if n > 0 {
                        write!(f, " ⊕ ")?;
                    }
                    write!(f, "{t}")?;
                }
                Ok(())
            }
        }
    }
}

/// Which indicator of a shared routing coin gates a component.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize)]
pub enum Branch {
    /// Active when the coin shows route 2, probability `p`.
    Two,
    /// Active when the coin shows route 3, probability `1 − p`.
    Three,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Coin {
    pub id: usize,
    /// `P(r = 2)`.
    pub p: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct CoinRef {
    /// Index into [`NetworkModel::coins`].
    pub coin: usize,
    pub branch: Branch,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Component {
    pub dist: Distribution,
    pub coin: Option<CoinRef>,
}

impl Component {
    pub fn new(dist: Distribution) -> Self {
        Component { dist, coin: None }
    }

    pub fn gated(dist: Distribution, coin: usize, branch: Branch) -> Self {
        Component { dist, coin: Some(CoinRef { coin, branch }) }
    }
}

/// A validated model instance; immutable after construction.
#[derive(Clone, Debug, PartialEq)]
pub struct NetworkModel {
    name: Option<String>,
    s: usize,
    a: Vec<Entry>,
    b: Vec<Entry>,
    components: Vec<Component>,
    coins: Vec<Coin>,
    arrivals: ArrivalSpec,
}

impl NetworkModel {
    /// `a` is row-major `s×s`, `b` has length `s`; component indices in
    /// entries are 0-based.
    pub fn new(
        name: Option<String>,
        a: Vec<Vec<Entry>>,
        b: Vec<Entry>,
        components: Vec<Component>,
        coins: Vec<Coin>,
        arrivals: ArrivalSpec,
    ) -> Result<Self> {
        let s = a.len();
        if s == 0 {
            return Err(Error::Schema { path: "A".into(), message: "state dimension must be at least 1".into() });
        }
        for (i, row) in a.iter().enumerate() {
            if row.len() != s {
                return Err(Error::Schema {
                    path: format!("A[{i}]"),
                    message: format!("row has {} entries, expected {s}", row.len()),
                });
            }
        }
        if b.len() != s {
            return Err(Error::Schema { path: "B".into(), message: format!("B has {} entries, expected {s}", b.len()) });
        }
        let model = NetworkModel { name, s, a: a.into_iter().flatten().collect(), b, components, coins, arrivals };
        model.validate()?;
        Ok(model)
    }

    fn validate(&self) -> Result<()> {
        let k = self.components.len();
        for (c, comp) in self.components.iter().enumerate() {
            comp.dist.validate(&format!("components[{c}].dist"))?;
            if let Some(r) = comp.coin {
                if r.coin >= self.coins.len() {
                    return Err(Error::InvalidParameter {
                        path: format!("components[{c}].coin"),
                        message: "unknown coin".into(),
                    });
                }
            }
        }
        for (n, coin) in self.coins.iter().enumerate() {
            if !(coin.p > 0.0 && coin.p < 1.0) {
                return Err(Error::InvalidParameter {
                    path: format!("coins[{n}].p"),
                    message: format!("routing probability must lie in (0,1), got {}", coin.p),
                });
            }
        }
        let check_entry = |e: &Entry, path: String| -> Result<()> {
            for t in e.terms() {
                if let Some(&bad) = t.0.iter().find(|&&c| c >= k) {
                    return Err(Error::DanglingComponent { path, component: bad + 1 });
                }
            }
            Ok(())
        };
        for i in 0..self.s {
            for j in 0..self.s {
                check_entry(self.a(i, j), format!("A[{i}][{j}]"))?;
            }
            check_entry(&self.b[i], format!("B[{i}]"))?;
        }
        for i in 0..self.s {
            if self.a(i, i).is_neg_inf() {
                return Err(Error::BottomDiagonal { path: format!("A[{i}][{i}]") });
            }
        }
        self.arrivals.validate("arrivals")
    }

    pub fn name(&self) -> Option<&str> {
        self.name.as_deref()
    }

    pub fn with_name(mut self, name: impl Into<String>) -> Self {
        self.name = Some(name.into());
        self
    }

    pub fn dim(&self) -> usize {
        self.s
    }

    pub fn num_components(&self) -> usize {
        self.components.len()
    }

    #[inline]
    pub fn a(&self, i: usize, j: usize) -> &Entry {
        &self.a[i * self.s + j]
    }

    #[inline]
    pub fn b(&self, i: usize) -> &Entry {
        &self.b[i]
    }

    pub fn a_entries(&self) -> &[Entry] {
        &self.a
    }

    pub fn b_entries(&self) -> &[Entry] {
        &self.b
    }

    pub fn components(&self) -> &[Component] {
        &self.components
    }

    pub fn coins(&self) -> &[Coin] {
        &self.coins
    }

    pub fn arrivals(&self) -> &ArrivalSpec {
        &self.arrivals
    }

    pub fn with_arrivals(&self, arrivals: ArrivalSpec) -> Result<Self> {
        let mut m = self.clone();
        m.arrivals = arrivals;
        m.validate()?;
        Ok(m)
    }

    /// The law of `σ^{(k)}` on its own, coin gating folded in.
    pub fn marginal(&self, k: usize) -> Distribution {
        let c = &self.components[k];
        match c.coin {
            None => c.dist.clone(),
            Some(r) => {
                let p2 = self.coins[r.coin].p;
                let p = match r.branch {
                    Branch::Two => p2,
                    Branch::Three => 1.0 - p2,
                };
                Distribution::BernoulliModulated { p, inner: Box::new(c.dist.clone()) }
            }
        }
    }

    pub fn component_threshold(&self, k: usize) -> f64 {
        self.components[k].dist.mgf_threshold()
    }

    /// All components drawn without any randomness.
    pub fn is_deterministic(&self) -> bool {
        self.components.iter().all(|c| c.coin.is_none() && c.dist.is_degenerate())
    }
}

/// A failed condition of the unit-maximum-degree corollary.
#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum CorollaryViolation {
    /// Condition 1: distinct components are driven by one routing coin.
    SharedCoin { coin: usize, components: Vec<usize> },
    /// Condition 1: one component is the sole service time of several
    /// stations, so their services are not independent.
    SharedAcrossDiagonals { component: usize, diagonals: Vec<usize> },
    /// Condition 2: no diagonal entry equals `σ^{(k)}` alone.
    NoOwnDiagonal { component: usize },
    /// Condition 3: a term uses some component more than once.
    RepeatedIndex { matrix: char, row: usize, col: usize, term: String },
}

impl CorollaryViolation {
    pub fn condition(&self) -> u8 {
        match self {
            CorollaryViolation::SharedCoin { .. } | CorollaryViolation::SharedAcrossDiagonals { .. } => 1,
            CorollaryViolation::NoOwnDiagonal { .. } => 2,
            CorollaryViolation::RepeatedIndex { .. } => 3,
        }
    }
}

impl fmt::Display for CorollaryViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CorollaryViolation::SharedCoin { coin, components } => {
                write!(f, "condition 1: components {components:?} share routing coin {coin}")
            }
            CorollaryViolation::SharedAcrossDiagonals { component, diagonals } => {
                write!(f, "condition 1: component {component} drives diagonals {diagonals:?}")
            }
            CorollaryViolation::NoOwnDiagonal { component } => {
                write!(f, "condition 2: no diagonal entry equals σ{component} alone")
            }
            CorollaryViolation::RepeatedIndex { matrix, row, col, term } => {
                write!(f, "condition 3: {matrix}[{row}][{col}] has repeated index in {term}")
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct UnitDegreeReport {
    pub holds: bool,
    pub violations: Vec<CorollaryViolation>,
}

/// Checks the three conditions under which `η` cannot bind. Reported
/// indices (components, rows, columns) are 1-based.
pub fn check_unit_max_degree(model: &NetworkModel) -> UnitDegreeReport {
    let s = model.dim();
    let k = model.num_components();
    let mut violations = Vec::new();

    let mut by_coin: Vec<Vec<usize>> = vec![Vec::new(); model.coins().len()];
    for (c, comp) in model.components().iter().enumerate() {
        if let Some(r) = comp.coin {
            by_coin[r.coin].push(c + 1);
        }
    }
    for (n, members) in by_coin.into_iter().enumerate() {
        if members.len() > 1 {
            violations.push(CorollaryViolation::SharedCoin { coin: model.coins()[n].id, components: members });
        }
    }

    let mut diagonals: Vec<Vec<usize>> = vec![Vec::new(); k];
    for i in 0..s {
        if let Some(c) = model.a(i, i).as_single_component() {
            diagonals[c].push(i + 1);
        }
    }
    for (c, d) in diagonals.iter().enumerate() {
        match d.len() {
            0 => violations.push(CorollaryViolation::NoOwnDiagonal { component: c + 1 }),
            1 => {}
            _ => violations.push(CorollaryViolation::SharedAcrossDiagonals { component: c + 1, diagonals: d.clone() }),
        }
    }

    let mut scan = |matrix: char, row: usize, col: usize, e: &Entry| {
        for t in e.terms() {
            if t.has_repeats() {
                violations.push(CorollaryViolation::RepeatedIndex { matrix, row: row + 1, col: col + 1, term: t.to_string() });
            }
        }
    };
    for i in 0..s {
        for j in 0..s {
            scan('A', i, j, model.a(i, j));
        }
        scan('B', i, 0, model.b(i));
    }
    UnitDegreeReport { holds: violations.is_empty(), violations }
}
