use serde::{Deserialize, Serialize};

use super::{ArrivalSpec, Branch, Coin, CoinRef, Component, Distribution, Entry, NetworkModel, Term};
use crate::error::{Error, Result};

#[derive(Debug, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
struct ModelConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    name: Option<String>,
    s: usize,
    components: Vec<ComponentConfig>,
    #[serde(rename = "A")]
    a: Vec<Vec<EntryConfig>>,
    #[serde(rename = "B")]
    b: Vec<EntryConfig>,
    arrivals: ArrivalSpec,
}

#[derive(Debug, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
struct ComponentConfig {
    id: usize,
    dist: Distribution,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    coin: Option<CoinConfig>,
}

#[derive(Debug, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
struct CoinConfig {
    id: usize,
    branch: u8,
    p: f64,
}

#[derive(Debug, Deserialize, Serialize)]
#[serde(untagged)]
enum EntryConfig {
    Token(String),
    Number(f64),
    Max { max: Vec<Vec<usize>> },
}

/// Parses and validates a JSON model config. Every diagnostic carries the
/// path of the offending config element.
pub fn parse_model(text: &str) -> Result<NetworkModel> {
    let mut de = serde_json::Deserializer::from_str(text);
    let cfg: ModelConfig = serde_path_to_error::deserialize(&mut de).map_err(|e| {
        let path = e.path().to_string();
        Error::Schema { path: if path == "." { "$".into() } else { path }, message: e.inner().to_string() }
    })?;
    de.end().map_err(|e| Error::Schema { path: "$".into(), message: e.to_string() })?;
    from_config(cfg)
}

fn from_config(cfg: ModelConfig) -> Result<NetworkModel> {
    if cfg.s == 0 {
        return Err(Error::Schema { path: "s".into(), message: "state dimension must be at least 1".into() });
    }
    if cfg.a.len() != cfg.s {
        return Err(Error::Schema { path: "A".into(), message: format!("A has {} rows, expected s = {}", cfg.a.len(), cfg.s) });
    }
    let k = cfg.components.len();
    let mut slots: Vec<Option<Component>> = vec![None; k];
    let mut coins: Vec<Coin> = Vec::new();
    for (n, c) in cfg.components.iter().enumerate() {
        let path = format!("components[{n}]");
        if c.id == 0 || c.id > k {
            return Err(Error::InvalidParameter {
                path: format!("{path}.id"),
                message: format!("component ids must be exactly 1..={k}, got {}", c.id),
            });
        }
        if slots[c.id - 1].is_some() {
            return Err(Error::InvalidParameter { path: format!("{path}.id"), message: format!("duplicate component id {}", c.id) });
        }
        c.dist.validate(&format!("{path}.dist"))?;
        let coin = match &c.coin {
            None => None,
            Some(cc) => {
                let branch = match cc.branch {
                    2 => Branch::Two,
                    3 => Branch::Three,
                    b => {
                        return Err(Error::InvalidParameter {
                            path: format!("{path}.coin.branch"),
                            message: format!("branch must be 2 or 3, got {b}"),
                        })
                    }
                };
                if !(cc.p > 0.0 && cc.p < 1.0) {
                    return Err(Error::InvalidParameter {
                        path: format!("{path}.coin.p"),
                        message: format!("routing probability must lie in (0,1), got {}", cc.p),
                    });
                }
                let idx = match coins.iter().position(|x| x.id == cc.id) {
                    Some(i) => {
                        if coins[i].p != cc.p {
                            return Err(Error::InvalidParameter {
                                path: format!("{path}.coin.p"),
                                message: format!("coin {} declared with p = {} and p = {}", cc.id, coins[i].p, cc.p),
                            });
                        }
                        i
                    }
                    None => {
                        coins.push(Coin { id: cc.id, p: cc.p });
                        coins.len() - 1
                    }
                };
                Some(CoinRef { coin: idx, branch })
            }
        };
        slots[c.id - 1] = Some(Component { dist: c.dist.clone(), coin });
    }
    let components: Vec<Component> = slots.into_iter().map(|c| c.expect("ids form 1..=K")).collect();

    let mut a = Vec::with_capacity(cfg.s);
    for (i, row) in cfg.a.iter().enumerate() {
        if row.len() != cfg.s {
            return Err(Error::Schema {
                path: format!("A[{i}]"),
                message: format!("row has {} entries, expected s = {}", row.len(), cfg.s),
            });
        }
        let mut out = Vec::with_capacity(cfg.s);
        for (j, e) in row.iter().enumerate() {
            out.push(entry_from_config(e, &format!("A[{i}][{j}]"), k)?);
        }
        a.push(out);
    }
    if cfg.b.len() != cfg.s {
        return Err(Error::Schema { path: "B".into(), message: format!("B has {} entries, expected s = {}", cfg.b.len(), cfg.s) });
    }
    let b = cfg
        .b
        .iter()
        .enumerate()
        .map(|(i, e)| entry_from_config(e, &format!("B[{i}]"), k))
        .collect::<Result<Vec<_>>>()?;
    NetworkModel::new(cfg.name, a, b, components, coins, cfg.arrivals)
}

fn entry_from_config(e: &EntryConfig, path: &str, k: usize) -> Result<Entry> {
    match e {
        EntryConfig::Token(t) if t == "-inf" => Ok(Entry::NegInf),
        EntryConfig::Token(t) if t == "0" => Ok(Entry::Zero),
        EntryConfig::Number(x) if *x == 0.0 => Ok(Entry::Zero),
        EntryConfig::Token(t) => Err(Error::Schema {
            path: path.into(),
            message: format!("expected \"-inf\", \"0\" or {{\"max\": [...]}}, got \"{t}\""),
        }),
        EntryConfig::Number(x) => Err(Error::Schema {
            path: path.into(),
            message: format!("constant {x} is not allowed; use a deterministic component"),
        }),
        EntryConfig::Max { max } => {
            if max.is_empty() {
                return Err(Error::Schema { path: format!("{path}.max"), message: "empty max".into() });
            }
            let mut terms = Vec::with_capacity(max.len());
            for (t, ids) in max.iter().enumerate() {
                if ids.is_empty() {
                    return Err(Error::Schema { path: format!("{path}.max[{t}]"), message: "empty term".into() });
                }
                if let Some(&bad) = ids.iter().find(|&&id| id == 0 || id > k) {
                    return Err(Error::DanglingComponent { path: format!("{path}.max[{t}]"), component: bad });
                }
                terms.push(Term::new(ids.iter().map(|id| id - 1).collect()));
            }
            Ok(Entry::Poly(terms))
        }
    }
}

fn entry_to_config(e: &Entry) -> EntryConfig {
    match e {
        Entry::NegInf => EntryConfig::Token("-inf".into()),
        Entry::Zero => EntryConfig::Token("0".into()),
        Entry::Poly(terms) => EntryConfig::Max {
            max: terms.iter().map(|t| t.components().iter().map(|k| k + 1).collect()).collect(),
        },
    }
}

/// Inverse of [`parse_model`], pretty-printed.
pub fn model_to_json(model: &NetworkModel) -> String {
    let s = model.dim();
    let cfg = ModelConfig {
        name: model.name().map(str::to_string),
        s,
        components: model
            .components()
            .iter()
            .enumerate()
            .map(|(n, c)| ComponentConfig {
                id: n + 1,
                dist: c.dist.clone(),
                coin: c.coin.map(|r| {
                    let coin = &model.coins()[r.coin];
                    CoinConfig { id: coin.id, branch: if r.branch == Branch::Two { 2 } else { 3 }, p: coin.p }
                }),
            })
            .collect(),
        a: (0..s).map(|i| (0..s).map(|j| entry_to_config(model.a(i, j))).collect()).collect(),
        b: (0..s).map(|i| entry_to_config(model.b(i))).collect(),
        arrivals: model.arrivals().clone(),
    };
    serde_json::to_string_pretty(&cfg).expect("model configs always serialize")
}
