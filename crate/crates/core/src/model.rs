//! Data centers, logical links and the network topology.
//!
//! All capacity checks use inclusive inequalities: a DC may be filled exactly
//! to its storage (C1), compute (C2) and RAM capacity, and a link exactly to
//! its bandwidth (C4).

use crate::catalog::{VnfCatalog, VnfType};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

pub type DcId = usize;
pub type LinkId = usize;

/// Slack for accumulated floating-point sums in capacity comparisons.
const EPS: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Resource {
    /// C1
    Storage,
    /// C2
    Compute,
    Ram,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ModelError {
    #[error("installing would exceed {0:?} capacity")]
    CapacityExceeded(Resource),
    #[error("no idle instance of {0} to remove")]
    NoIdleInstance(VnfType),
    #[error("{0} is not installed")]
    NotInstalled(VnfType),
    #[error("reservation of {requested} Mbps exceeds free bandwidth {free} Mbps")]
    BandwidthExceeded { requested: f64, free: f64 },
    #[error("release of {requested} Mbps exceeds reserved {reserved} Mbps")]
    ReleaseUnderflow { requested: f64, reserved: f64 },
    #[error("bandwidth amount must be positive and finite, got {0}")]
    InvalidAmount(f64),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Datacenter {
    pub id: DcId,
    /// GHz
    pub cpu_capacity: f64,
    /// GB
    pub storage_capacity: f64,
    /// GB
    pub ram_capacity: f64,
    installed: [u32; VnfType::COUNT],
    busy: [u32; VnfType::COUNT],
}

impl Datacenter {
    pub fn new(id: DcId, cpu_capacity: f64, storage_capacity: f64, ram_capacity: f64) -> Self {
        Self {
            id,
            cpu_capacity,
            storage_capacity,
            ram_capacity,
            installed: [0; VnfType::COUNT],
            busy: [0; VnfType::COUNT],
        }
    }

    pub fn installed(&self, v: VnfType) -> u32 {
        self.installed[v.index()]
    }

    pub fn busy(&self, v: VnfType) -> u32 {
        self.busy[v.index()]
    }

    pub fn idle(&self, v: VnfType) -> u32 {
        self.installed(v) - self.busy(v)
    }

    pub fn total_installed(&self) -> u32 {
        self.installed.iter().sum()
    }

    fn used(&self, demand: impl Fn(VnfType) -> f64) -> f64 {
        VnfType::ALL
            .iter()
            .map(|&v| self.installed(v) as f64 * demand(v))
            .sum()
    }

    pub fn used_storage(&self, catalog: &VnfCatalog) -> f64 {
        self.used(|v| catalog.get(v).storage_demand)
    }

    pub fn used_cpu(&self, catalog: &VnfCatalog) -> f64 {
        self.used(|v| catalog.get(v).cpu_demand)
    }

    pub fn used_ram(&self, catalog: &VnfCatalog) -> f64 {
        self.used(|v| catalog.get(v).ram_demand)
    }

    pub fn free_fraction(&self, catalog: &VnfCatalog, r: Resource) -> f64 {
        let (used, cap) = match r {
            Resource::Storage => (self.used_storage(catalog), self.storage_capacity),
            Resource::Compute => (self.used_cpu(catalog), self.cpu_capacity),
            Resource::Ram => (self.used_ram(catalog), self.ram_capacity),
        };
        (1.0 - used / cap).clamp(0.0, 1.0)
    }

    /// C1 for one more instance of `v`.
    pub fn check_storage(&self, catalog: &VnfCatalog, v: VnfType) -> bool {
        self.used_storage(catalog) + catalog.get(v).storage_demand <= self.storage_capacity + EPS
    }

    /// C2 for one more instance of `v`.
    pub fn check_compute(&self, catalog: &VnfCatalog, v: VnfType) -> bool {
        self.used_cpu(catalog) + catalog.get(v).cpu_demand <= self.cpu_capacity + EPS
    }

    pub fn check_ram(&self, catalog: &VnfCatalog, v: VnfType) -> bool {
        self.used_ram(catalog) + catalog.get(v).ram_demand <= self.ram_capacity + EPS
    }

    /// First violated resource constraint for installing one more `v`, if any.
    pub fn install_blocker(&self, catalog: &VnfCatalog, v: VnfType) -> Option<Resource> {
        if !self.check_storage(catalog, v) {
            Some(Resource::Storage)
        } else if !self.check_compute(catalog, v) {
            Some(Resource::Compute)
        } else if !self.check_ram(catalog, v) {
            Some(Resource::Ram)
        } else {
            None
        }
    }

    pub fn can_install(&self, catalog: &VnfCatalog, v: VnfType) -> bool {
        self.install_blocker(catalog, v).is_none()
    }

    /// How many instances of `v` an empty copy of this DC could hold.
    pub fn max_instances(&self, catalog: &VnfCatalog, v: VnfType) -> u32 {
        let e = catalog.get(v);
        let n = (self.storage_capacity / e.storage_demand)
            .min(self.cpu_capacity / e.cpu_demand)
            .min(self.ram_capacity / e.ram_demand);
        (n + EPS).floor() as u32
    }

    pub fn install_vnf(&mut self, catalog: &VnfCatalog, v: VnfType) -> Result<(), ModelError> {
        if let Some(r) = self.install_blocker(catalog, v) {
            return Err(ModelError::CapacityExceeded(r));
        }
        self.installed[v.index()] += 1;
        Ok(())
    }

    /// Removes one idle instance of `v`.
    pub fn uninstall_vnf(&mut self, v: VnfType) -> Result<(), ModelError> {
        if self.installed(v) == 0 {
            return Err(ModelError::NotInstalled(v));
        }
        if self.idle(v) == 0 {
            return Err(ModelError::NoIdleInstance(v));
        }
        self.installed[v.index()] -= 1;
        Ok(())
    }

    /// Marks one idle instance of `v` as processing.
    pub fn occupy(&mut self, v: VnfType) -> Result<(), ModelError> {
        if self.installed(v) == 0 {
            return Err(ModelError::NotInstalled(v));
        }
        if self.idle(v) == 0 {
            return Err(ModelError::NoIdleInstance(v));
        }
        self.busy[v.index()] += 1;
        Ok(())
    }

    /// Returns a busy instance of `v` to the idle pool.
    pub fn free(&mut self, v: VnfType) {
        debug_assert!(self.busy(v) > 0, "freeing an idle {v}");
        self.busy[v.index()] = self.busy[v.index()].saturating_sub(1);
    }

    /// C1, C2, RAM and the busy ≤ installed bound.
    pub fn invariants_hold(&self, catalog: &VnfCatalog) -> bool {
        self.used_storage(catalog) <= self.storage_capacity + EPS
            && self.used_cpu(catalog) <= self.cpu_capacity + EPS
            && self.used_ram(catalog) <= self.ram_capacity + EPS
            && VnfType::ALL.iter().all(|&v| self.busy(v) <= self.installed(v))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogicalLink {
    /// Endpoints, stored with `endpoints.0 < endpoints.1`.
    pub endpoints: (DcId, DcId),
    /// Mbps
    pub bw_capacity: f64,
    bw_reserved: f64,
    /// ms
    pub prop_delay: f64,
}

impl LogicalLink {
    pub fn new(a: DcId, b: DcId, bw_capacity: f64, prop_delay: f64) -> Self {
        assert_ne!(a, b, "link endpoints must be distinct");
        Self {
            endpoints: (a.min(b), a.max(b)),
            bw_capacity,
            bw_reserved: 0.0,
            prop_delay,
        }
    }

    pub fn reserved(&self) -> f64 {
        self.bw_reserved
    }

    pub fn free(&self) -> f64 {
        (self.bw_capacity - self.bw_reserved).max(0.0)
    }

    pub fn free_fraction(&self) -> f64 {
        (self.free() / self.bw_capacity).clamp(0.0, 1.0)
    }

    pub fn can_reserve(&self, mbps: f64) -> bool {
        self.bw_reserved + mbps <= self.bw_capacity + EPS
    }

    pub fn other(&self, dc: DcId) -> DcId {
        if self.endpoints.0 == dc {
            self.endpoints.1
        } else {
            self.endpoints.0
        }
    }

    /// C4-checked reservation.
    pub fn reserve_bandwidth(&mut self, mbps: f64) -> Result<(), ModelError> {
        if !(mbps.is_finite() && mbps > 0.0) {
            return Err(ModelError::InvalidAmount(mbps));
        }
        if !self.can_reserve(mbps) {
            return Err(ModelError::BandwidthExceeded {
                requested: mbps,
                free: self.free(),
            });
        }
        self.bw_reserved += mbps;
        Ok(())
    }

    pub fn release_bandwidth(&mut self, mbps: f64) -> Result<(), ModelError> {
        if !(mbps.is_finite() && mbps >= 0.0) {
            return Err(ModelError::InvalidAmount(mbps));
        }
        if mbps > self.bw_reserved + EPS {
            return Err(ModelError::ReleaseUnderflow {
                requested: mbps,
                reserved: self.bw_reserved,
            });
        }
        self.bw_reserved = (self.bw_reserved - mbps).max(0.0);
        Ok(())
    }

    pub fn invariants_hold(&self) -> bool {
        self.bw_reserved >= 0.0
            && self.bw_reserved <= self.bw_capacity + EPS
            && self.prop_delay >= 0.0
            && self.endpoints.0 != self.endpoints.1
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum TopologyError {
    #[error("link {0} references unknown DC {1}")]
    UnknownEndpoint(LinkId, DcId),
    #[error("duplicate link between DC {0} and DC {1}")]
    DuplicateLink(DcId, DcId),
    #[error("data center ids must be 0..n in order")]
    BadDcIds,
}

#[derive(Debug, Clone, PartialEq)]
pub struct NetworkTopology {
    pub datacenters: Vec<Datacenter>,
    pub links: Vec<LogicalLink>,
    adjacency: BTreeMap<(DcId, DcId), LinkId>,
}

impl NetworkTopology {
    pub fn new(datacenters: Vec<Datacenter>, links: Vec<LogicalLink>) -> Result<Self, TopologyError> {
        if datacenters.iter().enumerate().any(|(i, d)| d.id != i) {
            return Err(TopologyError::BadDcIds);
        }
        let mut adjacency = BTreeMap::new();
        for (id, l) in links.iter().enumerate() {
            let (a, b) = l.endpoints;
            for dc in [a, b] {
                if dc >= datacenters.len() {
                    return Err(TopologyError::UnknownEndpoint(id, dc));
                }
            }
            if adjacency.insert((a, b), id).is_some() {
                return Err(TopologyError::DuplicateLink(a, b));
            }
        }
        Ok(Self {
            datacenters,
            links,
            adjacency,
        })
    }

    /// Direct logical link between every pair of DCs.
    pub fn full_mesh(datacenters: Vec<Datacenter>, bw_capacity: f64, prop_delay: f64) -> Self {
        let n = datacenters.len();
        let links = (0..n)
            .flat_map(|a| (a + 1..n).map(move |b| (a, b)))
            .map(|(a, b)| LogicalLink::new(a, b, bw_capacity, prop_delay))
            .collect();
        Self::new(datacenters, links).expect("full mesh is well formed")
    }

    pub fn dc_count(&self) -> usize {
        self.datacenters.len()
    }

    pub fn link_between(&self, a: DcId, b: DcId) -> Option<LinkId> {
        self.adjacency.get(&(a.min(b), a.max(b))).copied()
    }

    pub fn incident_links(&self, dc: DcId) -> impl Iterator<Item = &LogicalLink> {
        self.links
            .iter()
            .filter(move |l| l.endpoints.0 == dc || l.endpoints.1 == dc)
    }

    pub fn invariants_hold(&self, catalog: &VnfCatalog) -> bool {
        self.datacenters.iter().all(|d| d.invariants_hold(catalog))
            && self.links.iter().all(LogicalLink::invariants_hold)
    }
}
