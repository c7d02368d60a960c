//! Precedence graph, communication classes and assumption checks.
//!
//! Coordinates are 0-based in the API and 1-based in serialized reports.
//! Edge `(i, j)` exists iff `A^{(j,i)}` is not `-inf`, so `j` waits on `i`.

use std::cmp::Reverse;
use std::collections::BinaryHeap;

use serde::ser::{Serialize, SerializeStruct, Serializer};

use crate::decay::eta_of;
use crate::model::{Entry, NetworkModel, StepSampler};
use crate::rng::{Purpose, StreamFactory};
use crate::semiring::{MaxPlus, MaxPlusMatrix};
use crate::stats::ExtReal;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Graph {
    succ: Vec<Vec<usize>>,
}

impl Graph {
    /// `support[j][i]` true means edge `(i, j)`.
    pub fn from_support(support: &[Vec<bool>]) -> Self {
        let s = support.len();
        let mut succ = vec![Vec::new(); s];
        for (j, row) in support.iter().enumerate() {
            assert_eq!(row.len(), s, "support must be square");
            for (i, &on) in row.iter().enumerate() {
                if on {
                    succ[i].push(j);
                }
            }
        }
        Graph { succ }
    }

    pub fn len(&self) -> usize {
        self.succ.len()
    }

    pub fn is_empty(&self) -> bool {
        self.succ.is_empty()
    }

    pub fn has_edge(&self, i: usize, j: usize) -> bool {
        self.succ[i].contains(&j)
    }

    pub fn successors(&self, i: usize) -> &[usize] {
        &self.succ[i]
    }
}

pub fn support_of(model: &NetworkModel) -> Vec<Vec<bool>> {
    let s = model.dim();
    (0..s).map(|i| (0..s).map(|j| !model.a(i, j).is_neg_inf()).collect()).collect()
}

pub fn build_graph(model: &NetworkModel) -> Graph {
    Graph::from_support(&support_of(model))
}

/// Class decomposition of a graph. Classes are numbered so that
/// `C_ℓ ⋖ C_m` implies `ℓ ≤ m`, ties broken by smallest coordinate.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Classes {
    pub classes: Vec<Vec<usize>>,
    pub class_of: Vec<usize>,
    /// `order[ℓ][m]`: some path leads from `C_ℓ` to `C_m` (reflexive).
    pub order: Vec<Vec<bool>>,
    /// `permutation[new] = old`; classes laid out contiguously in order.
    pub permutation: Vec<usize>,
}

impl Classes {
    pub fn len(&self) -> usize {
        self.classes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.classes.is_empty()
    }

    /// Coordinates `j` with `[j] ⋖ [i]`.
    pub fn upstream(&self, i: usize) -> Vec<usize> {
        let ci = self.class_of[i];
        (0..self.class_of.len()).filter(|&j| self.order[self.class_of[j]][ci]).collect()
    }

    /// Coordinates `j` with `[i] ⋖ [j]`.
    pub fn downstream(&self, i: usize) -> Vec<usize> {
        let ci = self.class_of[i];
        (0..self.class_of.len()).filter(|&j| self.order[ci][self.class_of[j]]).collect()
    }

    /// `P A Pᵀ` under [`Classes::permutation`].
    pub fn permute(&self, m: &MaxPlusMatrix) -> MaxPlusMatrix {
        m.restrict(&self.permutation, &self.permutation)
    }
}

pub fn communication_classes(graph: &Graph) -> Classes {
    let s = graph.len();
    let comp = tarjan(graph);
    let d = comp.iter().map(|&c| c + 1).max().unwrap_or(0);

    let mut members = vec![Vec::new(); d];
    for (v, &c) in comp.iter().enumerate() {
        members[c].push(v);
    }
    let mut indeg = vec![0usize; d];
    let mut cedges = vec![Vec::new(); d];
    for v in 0..s {
        for &w in graph.successors(v) {
            let (cv, cw) = (comp[v], comp[w]);
            if cv != cw && !cedges[cv].contains(&cw) {
                cedges[cv].push(cw);
                indeg[cw] += 1;
            }
        }
    }
    // Kahn on the condensation, always releasing the class with the
    // smallest coordinate first.
    let mut heap: BinaryHeap<Reverse<(usize, usize)>> =
        (0..d).filter(|&c| indeg[c] == 0).map(|c| Reverse((members[c][0], c))).collect();
    let mut rank = vec![usize::MAX; d];
    let mut next = 0;
    while let Some(Reverse((_, c))) = heap.pop() {
        rank[c] = next;
        next += 1;
        for &w in &cedges[c] {
            indeg[w] -= 1;
            if indeg[w] == 0 {
                heap.push(Reverse((members[w][0], w)));
            }
        }
    }
    debug_assert_eq!(next, d);

    let mut classes = vec![Vec::new(); d];
    for c in 0..d {
        classes[rank[c]] = members[c].clone();
    }
    let class_of: Vec<usize> = comp.iter().map(|&c| rank[c]).collect();

    let mut order = vec![vec![false; d]; d];
    for (l, row) in order.iter_mut().enumerate() {
        row[l] = true;
    }
    for c in 0..d {
        for &w in &cedges[c] {
            order[rank[c]][rank[w]] = true;
        }
    }
    // Edges only go forward in rank, so one increasing sweep closes them.
    for m in 0..d {
        for l in (0..m).rev() {
            if order[l][m] {
                continue;
            }
            order[l][m] = (l + 1..m).any(|k| order[l][k] && order[k][m]);
        }
    }
    let permutation = classes.iter().flatten().copied().collect();
    Classes { classes, class_of, order, permutation }
}

fn tarjan(graph: &Graph) -> Vec<usize> {
    struct State<'g> {
        g: &'g Graph,
        index: Vec<usize>,
        low: Vec<usize>,
        on_stack: Vec<bool>,
        stack: Vec<usize>,
        comp: Vec<usize>,
        next_index: usize,
        next_comp: usize,
    }
    fn visit(st: &mut State<'_>, v: usize) {
        st.index[v] = st.next_index;
        st.low[v] = st.next_index;
        st.next_index += 1;
        st.stack.push(v);
        st.on_stack[v] = true;
        for n in 0..st.g.successors(v).len() {
            let w = st.g.successors(v)[n];
            if st.index[w] == usize::MAX {
                visit(st, w);
                st.low[v] = st.low[v].min(st.low[w]);
            } else if st.on_stack[w] {
                st.low[v] = st.low[v].min(st.index[w]);
            }
        }
        if st.low[v] == st.index[v] {
            loop {
                let w = st.stack.pop().expect("v is on the stack");
                st.on_stack[w] = false;
                st.comp[w] = st.next_comp;
                if w == v {
                    break;
                }
            }
            st.next_comp += 1;
        }
    }
    let s = graph.len();
    let mut st = State {
        g: graph,
        index: vec![usize::MAX; s],
        low: vec![0; s],
        on_stack: vec![false; s],
        stack: Vec::new(),
        comp: vec![0; s],
        next_index: 0,
        next_comp: 0,
    };
    for v in 0..s {
        if st.index[v] == usize::MAX {
            visit(&mut st, v);
        }
    }
    st.comp
}

/// Counterexample to `A ⊗ 0 = B ⊕ 0` from one realized draw.
#[derive(Clone, Debug, PartialEq)]
pub struct SeparabilityWitness {
    pub row: usize,
    pub sigma: Vec<f64>,
    pub a_otimes_zero: MaxPlus,
    pub b_oplus_zero: MaxPlus,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CheckMethod {
    Structural,
    Symbolic,
    Sampled,
    Analytic,
}

impl CheckMethod {
    pub fn as_str(self) -> &'static str {
        match self {
            CheckMethod::Structural => "structural",
            CheckMethod::Symbolic => "symbolic",
            CheckMethod::Sampled => "sampled",
            CheckMethod::Analytic => "analytic",
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct AssumptionVerdicts {
    pub st: bool,
    pub sp: bool,
    pub sp_method: CheckMethod,
    pub sp_samples: usize,
    pub sp_witness: Option<SeparabilityWitness>,
    pub lt: bool,
    pub eta: f64,
    pub eta_note: Option<String>,
}

/// `(ST)` structurally, `(SP)` symbolically or by exact comparison on
/// `samples` draws, `(LT)` through the analytic `η`.
pub fn check_assumptions(model: &NetworkModel, samples: usize, seed: u64) -> AssumptionVerdicts {
    let st = (0..model.dim()).all(|i| !model.a(i, i).is_neg_inf());
    let symbolic = model.coins().is_empty() && separable_symbolically(model);
    let (sp, sp_method, sp_samples, sp_witness) = if symbolic {
        (true, CheckMethod::Symbolic, 0, None)
    } else {
        let witness = separability_by_sampling(model, samples, seed);
        (witness.is_none(), CheckMethod::Sampled, samples, witness)
    };
    let (eta, eta_note) = match eta_of(model) {
        Ok(eta) => (eta, None),
        Err(e) => (f64::NAN, Some(e.to_string())),
    };
    AssumptionVerdicts { st, sp, sp_method, sp_samples, sp_witness, lt: eta > 0.0, eta, eta_note }
}

/// Maximal elements under sub-multiset dominance; the constant `0` is the
/// empty multiset. Exact for non-negative component values.
fn reduced_terms(entries: &[&Entry]) -> Vec<Vec<usize>> {
    let mut all: Vec<Vec<usize>> = Vec::new();
    for e in entries {
        match e {
            Entry::NegInf => {}
            Entry::Zero => all.push(Vec::new()),
            Entry::Poly(terms) => all.extend(terms.iter().map(|t| t.components().to_vec())),
        }
    }
    all.sort();
    all.dedup();
    let dominated = |a: &Vec<usize>, b: &Vec<usize>| a != b && is_submultiset(a, b);
    let keep: Vec<Vec<usize>> = all.iter().filter(|a| !all.iter().any(|b| dominated(a, b))).cloned().collect();
    keep
}

fn is_submultiset(a: &[usize], b: &[usize]) -> bool {
    let (mut i, mut j) = (0, 0);
    while i < a.len() {
        if j == b.len() || a[i] < b[j] {
            return false;
        }
        if a[i] == b[j] {
            i += 1;
        }
        j += 1;
    }
    true
}

fn separable_symbolically(model: &NetworkModel) -> bool {
    let zero = Entry::Zero;
    (0..model.dim()).all(|i| {
        let row: Vec<&Entry> = (0..model.dim()).map(|j| model.a(i, j)).collect();
        reduced_terms(&row) == reduced_terms(&[model.b(i), &zero])
    })
}

fn separability_by_sampling(model: &NetworkModel, samples: usize, seed: u64) -> Option<SeparabilityWitness> {
    let mut rng = StreamFactory::new(seed).stream(Purpose::Check, 0);
    let mut sampler = StepSampler::new(model);
    let s = model.dim();
    for _ in 0..samples {
        sampler.draw(&mut rng);
        for i in 0..s {
            let lhs = (0..s).fold(MaxPlus::Bottom, |acc, j| acc.oplus(sampler.a(i, j)));
            let rhs = sampler.b(i).oplus(MaxPlus::ONE);
            if lhs != rhs {
                return Some(SeparabilityWitness {
                    row: i,
                    sigma: sampler.sigma().to_vec(),
                    a_otimes_zero: lhs,
                    b_oplus_zero: rhs,
                });
            }
        }
    }
    None
}

#[derive(Clone, Debug, PartialEq)]
pub struct StructureReport {
    pub support: Vec<Vec<bool>>,
    pub classes: Classes,
    pub verdicts: AssumptionVerdicts,
}

pub fn analyze(model: &NetworkModel, samples: usize, seed: u64) -> StructureReport {
    let support = support_of(model);
    let classes = communication_classes(&Graph::from_support(&support));
    StructureReport { support, classes, verdicts: check_assumptions(model, samples, seed) }
}

pub fn classes_of(model: &NetworkModel) -> Classes {
    communication_classes(&build_graph(model))
}

fn one_based(v: &[usize]) -> Vec<usize> {
    v.iter().map(|x| x + 1).collect()
}

impl Serialize for SeparabilityWitness {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        let mut st = serializer.serialize_struct("SeparabilityWitness", 4)?;
        st.serialize_field("row", &(self.row + 1))?;
        st.serialize_field("sigma", &self.sigma)?;
        st.serialize_field("a_otimes_zero", &self.a_otimes_zero)?;
        st.serialize_field("b_oplus_zero", &self.b_oplus_zero)?;
        st.end()
    }
}

impl Serialize for AssumptionVerdicts {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        let mut st = serializer.serialize_struct("AssumptionVerdicts", 3)?;
        st.serialize_field("ST", &serde_json::json!({ "pass": self.st, "method": CheckMethod::Structural.as_str() }))?;
        st.serialize_field(
            "SP",
            &serde_json::json!({
                "pass": self.sp,
                "method": self.sp_method.as_str(),
                "samples": self.sp_samples,
                "witness": self.sp_witness,
            }),
        )?;
        st.serialize_field(
            "LT",
            &serde_json::json!({
                "pass": self.lt,
                "method": CheckMethod::Analytic.as_str(),
                "eta": ExtReal(self.eta),
                "note": self.eta_note,
            }),
        )?;
        st.end()
    }
}

impl Serialize for StructureReport {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        let c = &self.classes;
        let classes: Vec<Vec<usize>> = c.classes.iter().map(|x| one_based(x)).collect();
        let order: Vec<(usize, usize)> = (0..c.len())
            .flat_map(|l| (0..c.len()).map(move |m| (l, m)))
            .filter(|&(l, m)| l != m && c.order[l][m])
            .map(|(l, m)| (l + 1, m + 1))
            .collect();
        let mut st = serializer.serialize_struct("StructureReport", 6)?;
        st.serialize_field("s", &self.support.len())?;
        st.serialize_field("support", &self.support)?;
        st.serialize_field("classes", &classes)?;
        st.serialize_field("class_of", &one_based(&c.class_of))?;
        st.serialize_field("order", &order)?;
        st.serialize_field("permutation", &one_based(&c.permutation))?;
        st.serialize_field("assumptions", &self.verdicts)?;
        st.end()
    }
}
