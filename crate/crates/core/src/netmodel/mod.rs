//! Multi-area network model under the proxy-bus approximation.
//!
//! Each area keeps its own internal DC network. Tie lines are not modelled as
//! branches; every interface is a scalar transfer injected at one proxy bus in
//! each incident area. The global interchange vector `q` has one entry per
//! interface with a fixed direction (`from_area -> to_area`), and each area
//! sees it through its outbound-signed projection `q_n`.

mod case;
mod shift;

pub use case::{load_case, parse_case, Case, CaseError};
pub use shift::{compute_shift_factors, ShiftError, ShiftFactors};

use serde::Serialize;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Bus {
    pub id: String,
    /// Index of the owning area in [`CaseSystem::areas`].
    pub area: usize,
    /// MW
    pub base_load: f64,
}

/// Internal transmission branch. Endpoints are local bus indices of the area.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Branch {
    pub id: String,
    pub from: usize,
    pub to: usize,
    /// per-unit
    pub susceptance: f64,
    /// MW; `None` leaves the branch unmonitored.
    pub limit: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Generator {
    pub id: String,
    /// Local bus index.
    pub bus: usize,
    /// $/MW^2, strictly positive
    pub cost_quadratic: f64,
    /// $/MW
    pub cost_linear: f64,
    pub g_min: f64,
    pub g_max: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Sign {
    Outbound,
    Inbound,
}

impl Sign {
    pub fn value(self) -> f64 {
        match self {
            Sign::Outbound => 1.0,
            Sign::Inbound => -1.0,
        }
    }
}

/// An area's view of one interface.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AreaInterface {
    /// Index into [`CaseSystem::interfaces`].
    pub interface: usize,
    pub sign: Sign,
    /// Local bus where the interface flow enters or leaves this area.
    pub proxy_bus: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Interface {
    pub id: String,
    pub from_area: usize,
    pub to_area: usize,
    /// MW upper bound on `q(i)`.
    pub capacity: f64,
    /// MW lower bound on `q(i)`; defaults to `-capacity`.
    pub lower_bound: f64,
    /// Local bus index in `from_area`.
    pub proxy_from: usize,
    /// Local bus index in `to_area`.
    pub proxy_to: usize,
}

impl Interface {
    pub fn clamp(&self, value: f64) -> f64 {
        value.clamp(self.lower_bound, self.capacity)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Area {
    pub id: String,
    pub buses: Vec<Bus>,
    pub branches: Vec<Branch>,
    pub generators: Vec<Generator>,
    /// Local index of the reference bus.
    pub slack: usize,
    /// Interfaces touching this area, in case-file order.
    pub interfaces: Vec<AreaInterface>,
}

impl Area {
    pub fn base_loads(&self) -> Vec<f64> {
        self.buses.iter().map(|b| b.base_load).collect()
    }

    pub fn bus_index(&self, id: &str) -> Option<usize> {
        self.buses.iter().position(|b| b.id == id)
    }

    /// Position of `interface` in this area's interface list.
    pub fn slot_of(&self, interface: usize) -> Option<usize> {
        self.interfaces.iter().position(|ai| ai.interface == interface)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CaseSystem {
    pub name: String,
    pub areas: Vec<Area>,
    pub interfaces: Vec<Interface>,
}

impl CaseSystem {
    /// Number of interfaces `I`.
    pub fn interface_count(&self) -> usize {
        self.interfaces.len()
    }

    /// Number of areas `N`.
    pub fn area_count(&self) -> usize {
        self.areas.len()
    }

    pub fn area_index(&self, id: &str) -> Option<usize> {
        self.areas.iter().position(|a| a.id == id)
    }

    /// `(area, local bus)` of a bus id.
    pub fn locate_bus(&self, id: &str) -> Option<(usize, usize)> {
        self.areas
            .iter()
            .enumerate()
            .find_map(|(a, area)| area.bus_index(id).map(|b| (a, b)))
    }

    pub fn lower_bounds(&self) -> Vec<f64> {
        self.interfaces.iter().map(|i| i.lower_bound).collect()
    }

    pub fn capacities(&self) -> Vec<f64> {
        self.interfaces.iter().map(|i| i.capacity).collect()
    }

    /// True when every entry of `q` lies in its interface bounds.
    pub fn within_bounds(&self, q: &[f64]) -> bool {
        q.len() == self.interfaces.len()
            && q.iter()
                .zip(&self.interfaces)
                .all(|(v, i)| *v >= i.lower_bound && *v <= i.capacity)
    }
}

/// Outbound-signed interchange seen by `area`: `q_n(j) = sign_j * q(i_j)`.
pub fn project_interchange(q: &[f64], area: &Area) -> Vec<f64> {
    area.interfaces
        .iter()
        .map(|ai| ai.sign.value() * q[ai.interface])
        .collect()
}

/// A validated system together with the shift factors of every area.
#[derive(Debug, Clone)]
pub struct Network {
    pub system: CaseSystem,
    pub shift: Vec<ShiftFactors>,
}

impl Network {
    pub fn new(system: CaseSystem) -> Result<Self, ShiftError> {
        let shift = system
            .areas
            .iter()
            .map(compute_shift_factors)
            .collect::<Result<Vec<_>, _>>()?;
        Ok(Self { system, shift })
    }

    pub fn area(&self, n: usize) -> (&Area, &ShiftFactors) {
        (&self.system.areas[n], &self.shift[n])
    }
}
