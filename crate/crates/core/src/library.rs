//! Bundled networks with their known closed-form facts.
//!
//! Facts here are derived by hand from the model definitions and never by
//! running the solver, so tests can use them as oracles.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::{ArrivalSpec, Branch, Coin, Component, Distribution, Entry, NetworkModel, Term};
use crate::stats::ser_ext;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ModelFacts {
    /// `None` when not known in closed form.
    #[serde(serialize_with = "ser_opt_ext")]
    pub expected_eta: Option<f64>,
    #[serde(serialize_with = "ser_opt_ext")]
    pub expected_theta_star: Option<f64>,
    /// Classes in topological order, 0-based coordinates.
    pub expected_classes: Vec<Vec<usize>>,
    /// How the facts were obtained.
    pub source: String,
}

fn ser_opt_ext<S: serde::Serializer>(x: &Option<f64>, s: S) -> std::result::Result<S::Ok, S::Error> {
    match x {
        Some(v) => ser_ext(v, s),
        None => s.serialize_str("not_known"),
    }
}

fn exp_rate(d: &Distribution) -> Option<f64> {
    match d {
        Distribution::Exponential { rate } => Some(*rate),
        _ => None,
    }
}

fn poisson_rate(a: &ArrivalSpec) -> Option<f64> {
    match a {
        ArrivalSpec::Exponential { rate } => Some(*rate),
        _ => None,
    }
}

fn singletons(s: usize) -> Vec<Vec<usize>> {
    (0..s).map(|i| vec![i]).collect()
}

/// `A = [[σ]]`, `B = [σ]`: the Lindley recursion.
pub fn single_server(service: Distribution, arrivals: ArrivalSpec) -> Result<(NetworkModel, ModelFacts)> {
    let model = NetworkModel::new(
        Some("single_server".into()),
        vec![vec![Entry::component(0)]],
        vec![Entry::component(0)],
        vec![Component::new(service.clone())],
        vec![],
        arrivals.clone(),
    )?;
    let (eta, theta, source) = match (exp_rate(&service), poisson_rate(&arrivals), &service, &arrivals) {
        (Some(mu), Some(l), _, _) => {
            (Some(mu), Some(mu - l), "μ/(μ−θ) · λ/(λ+θ) = 1 solved for θ > 0".to_string())
        }
        (_, _, Distribution::Deterministic { value }, ArrivalSpec::Deterministic { value: a }) if value < a => {
            (Some(f64::INFINITY), Some(f64::INFINITY), "deterministic and stable: Z is constant".into())
        }
        _ => (Some(service.mgf_threshold()), None, "threshold of the service law".into()),
    };
    Ok((model, ModelFacts { expected_eta: eta, expected_theta_star: theta, expected_classes: singletons(1), source }))
}

/// Two stations in series. `second = None` makes both stations serve each
/// customer with the same draw.
pub fn tandem(first: Distribution, second: Option<Distribution>, arrivals: ArrivalSpec) -> Result<(NetworkModel, ModelFacts)> {
    let shared = second.is_none();
    let (components, k2) = match &second {
        None => (vec![Component::new(first.clone())], 0),
        Some(d) => (vec![Component::new(first.clone()), Component::new(d.clone())], 1),
    };
    let a = vec![
        vec![Entry::component(0), Entry::NegInf],
        vec![Entry::product(vec![0, k2]), Entry::component(k2)],
    ];
    let b = vec![Entry::component(0), Entry::product(vec![0, k2])];
    let name = if shared { "tandem_identical" } else { "tandem_independent" };
    let model = NetworkModel::new(Some(name.into()), a, b, components, vec![], arrivals.clone())?;

    let mu1 = exp_rate(&first);
    let mu2 = second.as_ref().map_or(mu1, exp_rate);
    let l = poisson_rate(&arrivals);
    let facts = match (mu1, mu2, l, shared) {
        (Some(mu), _, Some(l), true) => ModelFacts {
            expected_eta: Some(mu / 2.0),
            expected_theta_star: Some(if l <= mu / 2.0 { mu / 2.0 } else { mu - l }),
            expected_classes: singletons(2),
            source: "shared exponential service: B² = 2σ gives η = μ/2, each station alone gives μ − λ".into(),
        },
        (Some(m1), Some(m2), Some(l), false) => ModelFacts {
            expected_eta: Some(m1.min(m2)),
            expected_theta_star: Some((m1 - l).min(m2 - l)),
            expected_classes: singletons(2),
            source: "independent exponential stations: min of the two single-server rates".into(),
        },
        _ => ModelFacts {
            expected_eta: None,
            expected_theta_star: None,
            expected_classes: singletons(2),
            source: "no closed form outside the exponential family".into(),
        },
    };
    Ok((model, facts))
}

fn fork_join_skeleton(name: &str, components: Vec<Component>, coins: Vec<Coin>, arrivals: ArrivalSpec) -> Result<NetworkModel> {
    use Entry::NegInf;
    let join = Entry::max_of(vec![Term::new(vec![0, 1]), Term::new(vec![0, 2])]);
    let a = vec![
        vec![Entry::component(0), NegInf, NegInf, NegInf],
        vec![Entry::product(vec![0, 1]), Entry::component(1), NegInf, NegInf],
        vec![Entry::product(vec![0, 2]), NegInf, Entry::component(2), NegInf],
        vec![join.clone(), Entry::component(1), Entry::component(2), Entry::Zero],
    ];
    let b = vec![Entry::component(0), Entry::product(vec![0, 1]), Entry::product(vec![0, 2]), join];
    NetworkModel::new(Some(name.into()), a, b, components, coins, arrivals)
}

/// One splitter feeding two parallel stations whose outputs join.
pub fn fork_join(s1: Distribution, s2: Distribution, s3: Distribution, arrivals: ArrivalSpec) -> Result<(NetworkModel, ModelFacts)> {
    let comps = vec![Component::new(s1.clone()), Component::new(s2.clone()), Component::new(s3.clone())];
    let model = fork_join_skeleton("fork_join", comps, vec![], arrivals.clone())?;
    let rates: Option<Vec<f64>> = [&s1, &s2, &s3].iter().map(|d| exp_rate(d)).collect();
    let facts = match (rates, poisson_rate(&arrivals)) {
        (Some(r), Some(l)) => ModelFacts {
            expected_eta: Some(r.iter().copied().fold(f64::INFINITY, f64::min)),
            expected_theta_star: Some(r.iter().map(|mu| mu - l).fold(f64::INFINITY, f64::min)),
            expected_classes: singletons(4),
            source: "independent stations: min of the three single-server rates, the join block is 0".into(),
        },
        _ => ModelFacts {
            expected_eta: None,
            expected_theta_star: None,
            expected_classes: singletons(4),
            source: "no closed form outside the exponential family".into(),
        },
    };
    Ok((model, facts))
}

/// Two-path routing with resequencing, `ζ¹ = 0` at the splitter.
pub fn resequencing(zeta2: Distribution, zeta3: Distribution, p: f64, arrivals: ArrivalSpec) -> Result<(NetworkModel, ModelFacts)> {
    resequencing_general(Distribution::deterministic(0.0), zeta2, zeta3, p, arrivals)
}

/// Each packet takes path 2 with probability `p`, else path 3; the other
/// path serves a zero-length clone so that the join releases packets in
/// order.
pub fn resequencing_general(
    zeta1: Distribution,
    zeta2: Distribution,
    zeta3: Distribution,
    p: f64,
    arrivals: ArrivalSpec,
) -> Result<(NetworkModel, ModelFacts)> {
    if !(p > 0.0 && p < 1.0) {
        return Err(Error::InvalidParameter { path: "p".into(), message: format!("routing probability must lie in (0,1), got {p}") });
    }
    let comps = vec![
        Component::new(zeta1.clone()),
        Component::gated(zeta2.clone(), 0, Branch::Two),
        Component::gated(zeta3.clone(), 0, Branch::Three),
    ];
    let model = fork_join_skeleton("resequencing", comps, vec![Coin { id: 1, p }], arrivals.clone())?;
    let zero_splitter = matches!(zeta1, Distribution::Deterministic { value } if value == 0.0);
    let facts = match (exp_rate(&zeta2), exp_rate(&zeta3), poisson_rate(&arrivals), zero_splitter) {
        (Some(m2), Some(m3), Some(l), true) => ModelFacts {
            expected_eta: Some(m2.min(m3)),
            expected_theta_star: Some((m2 - l * p).min(m3 - l * (1.0 - p))),
            expected_classes: singletons(4),
            source: "path k is an M/M/1 queue thinned by its routing share: θ₂ = μ₂ − λp, θ₃ = μ₃ − λ(1−p)".into(),
        },
        _ => ModelFacts {
            expected_eta: None,
            expected_theta_star: None,
            expected_classes: singletons(4),
            source: "no closed form outside the exponential family".into(),
        },
    };
    Ok((model, facts))
}

/// Parameters that may override a builtin's defaults.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct BuiltinParams {
    pub mu: Option<f64>,
    pub mu1: Option<f64>,
    pub mu2: Option<f64>,
    pub mu3: Option<f64>,
    pub lambda: Option<f64>,
    pub p: Option<f64>,
}

pub const BUILTINS: [&str; 5] = ["single_server", "tandem_identical", "tandem_independent", "fork_join", "resequencing"];

pub fn builtin(name: &str, params: &BuiltinParams) -> Result<(NetworkModel, ModelFacts)> {
    let exp = |rate: f64| Distribution::exponential(rate);
    let arrivals = |default: f64| ArrivalSpec::poisson(params.lambda.unwrap_or(default));
    match name {
        "mm1" | "single_server" => single_server(exp(params.mu.unwrap_or(1.0)), arrivals(0.5)),
        "tandem_identical" => tandem(exp(params.mu.unwrap_or(1.0)), None, arrivals(0.4)),
        "tandem_independent" => tandem(
            exp(params.mu1.or(params.mu).unwrap_or(1.0)),
            Some(exp(params.mu2.unwrap_or(1.5))),
            arrivals(0.5),
        ),
        "fork_join" => fork_join(
            exp(params.mu1.unwrap_or(1.0)),
            exp(params.mu2.unwrap_or(0.8)),
            exp(params.mu3.unwrap_or(1.2)),
            arrivals(0.5),
        ),
        "resequencing" => resequencing(
            exp(params.mu2.unwrap_or(1.2)),
            exp(params.mu3.unwrap_or(0.8)),
            params.p.unwrap_or(0.7),
            arrivals(1.0),
        ),
        other => Err(Error::Invalid(format!("unknown builtin `{other}`; expected one of {}", BUILTINS.join(", ")))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::check_unit_max_degree;
    use crate::structure::{check_assumptions, classes_of};

    #[test]
    fn defaults_pass_assumptions_and_match_classes() {
        for name in BUILTINS {
            let (m, facts) = builtin(name, &BuiltinParams::default()).unwrap();
            let v = check_assumptions(&m, 2000, 3);
            assert!(v.st && v.sp && v.lt, "{name}: {v:?}");
            assert_eq!(classes_of(&m).classes, facts.expected_classes, "{name}");
            assert_eq!(Some(v.eta), facts.expected_eta, "{name}");
        }
    }

    #[test]
    fn corollary_status() {
        let holds = |n: &str| check_unit_max_degree(&builtin(n, &BuiltinParams::default()).unwrap().0).holds;
        assert!(holds("single_server") && holds("fork_join") && holds("tandem_independent"));
        assert!(!holds("tandem_identical") && !holds("resequencing"));
    }

    #[test]
    fn facts_by_hand() {
        let p = |l: f64| BuiltinParams { lambda: Some(l), ..Default::default() };
        assert_eq!(builtin("tandem_identical", &p(0.3)).unwrap().1.expected_theta_star, Some(0.5));
        let f = builtin("tandem_identical", &p(0.7)).unwrap().1;
        assert!((f.expected_theta_star.unwrap() - 0.3).abs() < 1e-15);
        let r = builtin("resequencing", &BuiltinParams::default()).unwrap().1;
        assert!((r.expected_theta_star.unwrap() - 0.5).abs() < 1e-12);
        let dd = single_server(Distribution::deterministic(0.5), ArrivalSpec::Deterministic { value: 1.0 }).unwrap().1;
        assert_eq!(dd.expected_theta_star, Some(f64::INFINITY));
    }

    #[test]
    fn bad_routing_probability() {
        let e = resequencing(Distribution::exponential(1.0), Distribution::exponential(1.0), 1.0, ArrivalSpec::poisson(0.5));
        assert!(matches!(e, Err(Error::InvalidParameter { .. })));
        assert!(builtin("nope", &BuiltinParams::default()).is_err());
    }

    /// Three packets, deterministic: packet 1 takes the slow path, so
    /// packet 2 (fast path) must wait for it at the join.
    #[test]
    fn resequencing_delay_by_hand() {
        use crate::semiring::MaxPlus;
        let (m, _) = resequencing(Distribution::deterministic(5.0), Distribution::deterministic(1.0), 0.5, ArrivalSpec::poisson(1.0)).unwrap();
        // ζ² = 5 makes path 2 the slow one; packet 1 takes it.
        let routes = [Branch::Two, Branch::Three, Branch::Three];
        let arrivals = [0.0, 1.0, 2.0];
        let mut x = vec![MaxPlus::Bottom; 4];
        let mut exits = Vec::new();
        for (r, t) in routes.iter().zip(arrivals) {
            let sigma = match r {
                Branch::Two => [0.0, 5.0, 0.0],
                Branch::Three => [0.0, 0.0, 1.0],
            };
            let a = |i: usize, j: usize| m.a(i, j).eval(&sigma);
            let b = |i: usize| m.b(i).eval(&sigma);
            let next: Vec<MaxPlus> = (0..4)
                .map(|i| {
                    (0..4).fold(b(i).otimes(MaxPlus::finite(t)), |acc, j| acc.oplus(a(i, j).otimes(x[j])))
                })
                .collect();
            exits.push(next[3].value().unwrap());
            x = next;
        }
        // Packet 1 leaves node 2 at 5; packet 2 leaves node 3 at 2 but
        // exits at 5; packet 3 leaves node 3 at 3 and also exits at 5.
        assert_eq!(exits, vec![5.0, 5.0, 5.0]);
    }
}
