//! Case-file ingestion. The format is TOML; see `docs/case-format.md`.

use std::collections::{HashMap, HashSet};
use std::path::Path;

use serde::Deserialize;
use sha2::{Digest, Sha256};
use thiserror::Error;

use super::{Area, AreaInterface, Branch, Bus, CaseSystem, Generator, Interface, Sign};
use crate::stochastic::{Injection, InjectionDistribution, NetLoadModel};

#[derive(Debug, Error)]
pub enum CaseError {
    #[error("cannot read case file {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("case file does not parse: {0}")]
    Parse(String),
    #[error("{entity}: {reason}")]
    Invalid { entity: String, reason: String },
}

fn invalid(entity: impl Into<String>, reason: impl Into<String>) -> CaseError {
    CaseError::Invalid {
        entity: entity.into(),
        reason: reason.into(),
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawCase {
    name: String,
    #[serde(default)]
    options: RawOptions,
    #[serde(default)]
    areas: Vec<RawArea>,
    #[serde(default)]
    buses: Vec<RawBus>,
    #[serde(default)]
    branches: Vec<RawBranch>,
    #[serde(default)]
    generators: Vec<RawGenerator>,
    #[serde(default)]
    interfaces: Vec<RawInterface>,
    #[serde(default)]
    injections: Vec<RawInjection>,
    #[serde(default)]
    periods: Vec<RawPeriod>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawOptions {
    q0: Option<Vec<f64>>,
    emergency_cost: Option<f64>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawArea {
    id: String,
    slack_bus: String,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawBus {
    id: String,
    area: String,
    #[serde(default)]
    load: f64,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawBranch {
    id: String,
    from: String,
    to: String,
    susceptance: f64,
    limit: Option<f64>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawGenerator {
    id: String,
    bus: String,
    cost_quadratic: f64,
    #[serde(default)]
    cost_linear: f64,
    g_min: f64,
    g_max: f64,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawInterface {
    id: Option<String>,
    from_area: String,
    to_area: String,
    capacity: f64,
    lower_bound: Option<f64>,
    proxy_from: String,
    proxy_to: String,
}

#[derive(Debug, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
enum RawDistribution {
    PointMass {
        bus: String,
        value: f64,
        truncate: Option<[f64; 2]>,
    },
    Gaussian {
        bus: String,
        mean: f64,
        std: f64,
        truncate: Option<[f64; 2]>,
    },
    GaussianMixture {
        bus: String,
        weights: Vec<f64>,
        means: Vec<f64>,
        stds: Vec<f64>,
        truncate: Option<[f64; 2]>,
    },
}

type RawInjection = RawDistribution;

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawPeriod {
    label: Option<String>,
    #[serde(default)]
    mean_shift: f64,
}

/// A parsed case: the network, its net-load uncertainty and run defaults.
#[derive(Debug, Clone)]
pub struct Case {
    pub system: CaseSystem,
    /// Uncertainty for a single scheduling instant.
    pub model: NetLoadModel,
    /// Time-indexed models for asynchronous scheduling; empty unless declared.
    pub periods: Vec<NetLoadModel>,
    pub q0: Option<Vec<f64>>,
    /// SHA-256 of the case text, hex.
    pub hash: String,
}

impl Case {
    /// Models for `horizon` steps: the declared periods (last one repeated if
    /// the horizon is longer), or the base model at every step.
    pub fn models_by_time(&self, horizon: usize) -> Vec<NetLoadModel> {
        (0..horizon)
            .map(|t| {
                if self.periods.is_empty() {
                    self.model.clone()
                } else {
                    self.periods[t.min(self.periods.len() - 1)].clone()
                }
            })
            .collect()
    }
}

pub fn load_case(path: impl AsRef<Path>) -> Result<Case, CaseError> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|source| CaseError::Io {
        path: path.display().to_string(),
        source,
    })?;
    parse_case(&text)
}

pub fn parse_case(text: &str) -> Result<Case, CaseError> {
    let raw: RawCase = toml::from_str(text).map_err(|e| CaseError::Parse(e.to_string()))?;
    let hash = hex::encode(Sha256::digest(text.as_bytes()));
    build(raw, hash)
}

fn check_finite(entity: &str, field: &str, v: f64) -> Result<(), CaseError> {
    if v.is_finite() {
        Ok(())
    } else {
        Err(invalid(entity, format!("{field} must be finite")))
    }
}

fn build(raw: RawCase, hash: String) -> Result<Case, CaseError> {
    if raw.areas.is_empty() {
        return Err(invalid("case", "no areas declared"));
    }
    let mut area_ids: HashMap<&str, usize> = HashMap::new();
    for (n, a) in raw.areas.iter().enumerate() {
        if area_ids.insert(a.id.as_str(), n).is_some() {
            return Err(invalid(format!("area {}", a.id), "duplicate id"));
        }
    }

    let mut areas: Vec<Area> = raw
        .areas
        .iter()
        .map(|a| Area {
            id: a.id.clone(),
            buses: vec![],
            branches: vec![],
            generators: vec![],
            slack: 0,
            interfaces: vec![],
        })
        .collect();

    // bus id -> (area, local index)
    let mut bus_ids: HashMap<String, (usize, usize)> = HashMap::new();
    for b in &raw.buses {
        let entity = format!("bus {}", b.id);
        let &n = area_ids
            .get(b.area.as_str())
            .ok_or_else(|| invalid(&entity, format!("unknown area {}", b.area)))?;
        check_finite(&entity, "load", b.load)?;
        if b.load < 0.0 {
            return Err(invalid(&entity, "load must be nonnegative"));
        }
        let local = areas[n].buses.len();
        if bus_ids.insert(b.id.clone(), (n, local)).is_some() {
            return Err(invalid(&entity, "duplicate id"));
        }
        areas[n].buses.push(Bus {
            id: b.id.clone(),
            area: n,
            base_load: b.load,
        });
    }
    let lookup = |entity: &str, id: &str| {
        bus_ids
            .get(id)
            .copied()
            .ok_or_else(|| invalid(entity, format!("unknown bus {id}")))
    };

    for (n, a) in raw.areas.iter().enumerate() {
        let entity = format!("area {}", a.id);
        if areas[n].buses.is_empty() {
            return Err(invalid(&entity, "has no buses"));
        }
        let (sn, local) = lookup(&entity, &a.slack_bus)?;
        if sn != n {
            return Err(invalid(
                &entity,
                format!("slack bus {} belongs to another area", a.slack_bus),
            ));
        }
        areas[n].slack = local;
    }

    let mut branch_ids = HashSet::new();
    for br in &raw.branches {
        let entity = format!("branch {}", br.id);
        if !branch_ids.insert(br.id.as_str()) {
            return Err(invalid(&entity, "duplicate id"));
        }
        let (fa, f) = lookup(&entity, &br.from)?;
        let (ta, t) = lookup(&entity, &br.to)?;
        if fa != ta {
            return Err(invalid(
                &entity,
                "endpoints lie in different areas; declare an interface instead",
            ));
        }
        if f == t {
            return Err(invalid(&entity, "from and to are the same bus"));
        }
        if !(br.susceptance > 0.0) || !br.susceptance.is_finite() {
            return Err(invalid(&entity, "susceptance must be positive"));
        }
        if let Some(limit) = br.limit {
            if !(limit > 0.0) || !limit.is_finite() {
                return Err(invalid(&entity, "limit must be positive"));
            }
        }
        areas[fa].branches.push(Branch {
            id: br.id.clone(),
            from: f,
            to: t,
            susceptance: br.susceptance,
            limit: br.limit,
        });
    }

    let mut gen_ids = HashSet::new();
    for g in &raw.generators {
        let entity = format!("generator {}", g.id);
        if !gen_ids.insert(g.id.as_str()) {
            return Err(invalid(&entity, "duplicate id"));
        }
        let (n, local) = lookup(&entity, &g.bus)?;
        for (field, v) in [
            ("cost_quadratic", g.cost_quadratic),
            ("cost_linear", g.cost_linear),
            ("g_min", g.g_min),
            ("g_max", g.g_max),
        ] {
            check_finite(&entity, field, v)?;
        }
        if !(g.cost_quadratic > 0.0) {
            return Err(invalid(&entity, "cost_quadratic must be positive"));
        }
        if g.g_min > g.g_max {
            return Err(invalid(&entity, "g_min exceeds g_max"));
        }
        areas[n].generators.push(Generator {
            id: g.id.clone(),
            bus: local,
            cost_quadratic: g.cost_quadratic,
            cost_linear: g.cost_linear,
            g_min: g.g_min,
            g_max: g.g_max,
        });
    }

    if let Some(cost) = raw.options.emergency_cost {
        check_finite("options", "emergency_cost", cost)?;
        for area in &mut areas {
            area.generators.push(Generator {
                id: format!("emergency@{}", area.id),
                bus: area.slack,
                cost_quadratic: 1e-3,
                cost_linear: cost,
                g_min: 0.0,
                g_max: 1e6,
            });
        }
    }

    for area in &areas {
        if area.generators.is_empty() {
            return Err(invalid(format!("area {}", area.id), "has no generators"));
        }
    }

    let mut interfaces = Vec::with_capacity(raw.interfaces.len());
    for (i, r) in raw.interfaces.iter().enumerate() {
        let id = r.id.clone().unwrap_or_else(|| format!("tie{}", i + 1));
        let entity = format!("interface {id}");
        let from = *area_ids
            .get(r.from_area.as_str())
            .ok_or_else(|| invalid(&entity, format!("unknown area {}", r.from_area)))?;
        let to = *area_ids
            .get(r.to_area.as_str())
            .ok_or_else(|| invalid(&entity, format!("unknown area {}", r.to_area)))?;
        if from == to {
            return Err(invalid(&entity, "endpoints are in the same area"));
        }
        check_finite(&entity, "capacity", r.capacity)?;
        let lower = r.lower_bound.unwrap_or(-r.capacity);
        check_finite(&entity, "lower_bound", lower)?;
        if lower > r.capacity {
            return Err(invalid(&entity, "lower_bound exceeds capacity"));
        }
        let (pf_area, pf) = lookup(&entity, &r.proxy_from)?;
        let (pt_area, pt) = lookup(&entity, &r.proxy_to)?;
        if pf_area != from {
            return Err(invalid(
                &entity,
                format!("proxy bus {} is not in area {}", r.proxy_from, r.from_area),
            ));
        }
        if pt_area != to {
            return Err(invalid(
                &entity,
                format!("proxy bus {} is not in area {}", r.proxy_to, r.to_area),
            ));
        }
        areas[from].interfaces.push(AreaInterface {
            interface: i,
            sign: Sign::Outbound,
            proxy_bus: pf,
        });
        areas[to].interfaces.push(AreaInterface {
            interface: i,
            sign: Sign::Inbound,
            proxy_bus: pt,
        });
        interfaces.push(Interface {
            id,
            from_area: from,
            to_area: to,
            capacity: r.capacity,
            lower_bound: lower,
            proxy_from: pf,
            proxy_to: pt,
        });
    }

    let system = CaseSystem {
        name: raw.name.clone(),
        areas,
        interfaces,
    };

    let mut injections = Vec::with_capacity(raw.injections.len());
    for inj in raw.injections {
        let (bus, distribution, truncate) = match inj {
            RawDistribution::PointMass { bus, value, truncate } => {
                (bus, InjectionDistribution::PointMass { value }, truncate)
            }
            RawDistribution::Gaussian {
                bus,
                mean,
                std,
                truncate,
            } => (bus, InjectionDistribution::Gaussian { mean, std }, truncate),
            RawDistribution::GaussianMixture {
                bus,
                weights,
                means,
                stds,
                truncate,
            } => (
                bus,
                InjectionDistribution::GaussianMixture { weights, means, stds },
                truncate,
            ),
        };
        let entity = format!("injection at bus {bus}");
        let (area, local) = lookup(&entity, &bus)?;
        injections.push(Injection {
            bus,
            area,
            local,
            distribution,
            truncation: truncate.map(|[lo, hi]| (lo, hi)),
        });
    }
    let base_load = system.areas.iter().map(|a| a.base_loads()).collect();
    let model = NetLoadModel {
        label: system.name.clone(),
        base_load,
        injections,
    };
    model.validate().map_err(|e| invalid("net-load model", e.to_string()))?;

    let periods = raw
        .periods
        .iter()
        .enumerate()
        .map(|(t, p)| {
            let label = p.label.clone().unwrap_or_else(|| format!("t{}", t + 1));
            model.shifted(label, p.mean_shift)
        })
        .collect::<Vec<_>>();
    for p in &periods {
        p.validate()
            .map_err(|e| invalid(format!("period {}", p.label), e.to_string()))?;
    }

    if let Some(q0) = &raw.options.q0 {
        if !system.within_bounds(q0) {
            return Err(invalid(
                "options",
                "q0 must have one entry per interface within its bounds",
            ));
        }
    }

    Ok(Case {
        system,
        model,
        periods,
        q0: raw.options.q0,
        hash,
    })
}
