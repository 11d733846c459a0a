use crate::catalog::{SfcKind, VnfType};
use crate::model::{DcId, LinkId};
use serde::{Deserialize, Serialize};

pub type RequestId = usize;

const EPS: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RequestStatus {
    /// Waiting for its next VNF to be allocated.
    Pending,
    /// Allocated, travelling to the DC that will process the next VNF.
    InTransit,
    Processing,
    Accepted,
    Dropped,
}

/// The in-flight allocation of a request's next VNF.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Stage {
    pub dc: DcId,
    pub vnf: VnfType,
    /// Remaining transit or processing time, ms.
    pub remaining: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SfcRequest {
    pub id: RequestId,
    pub kind: SfcKind,
    pub chain: Vec<VnfType>,
    pub source_dc: DcId,
    pub dest_dc: DcId,
    /// Mbps, fixed at generation time.
    pub bandwidth: f64,
    /// ms
    pub e2e_limit: f64,
    pub next_vnf_index: usize,
    /// `(vnf_index, dc)` for every completed VNF.
    pub allocations: Vec<(usize, DcId)>,
    /// Processing, propagation and waiting time so far, ms.
    pub elapsed: f64,
    pub status: RequestStatus,
    pub stage: Option<Stage>,
    /// Links holding a reservation of `bandwidth` for this request, one entry per hop.
    pub held_links: Vec<LinkId>,
}

impl SfcRequest {
    pub fn new(
        id: RequestId,
        kind: SfcKind,
        chain: Vec<VnfType>,
        source_dc: DcId,
        dest_dc: DcId,
        bandwidth: f64,
        e2e_limit: f64,
    ) -> Self {
        Self {
            id,
            kind,
            chain,
            source_dc,
            dest_dc,
            bandwidth,
            e2e_limit,
            next_vnf_index: 0,
            allocations: Vec::new(),
            elapsed: 0.0,
            status: RequestStatus::Pending,
            stage: None,
            held_links: Vec::new(),
        }
    }

    pub fn next_vnf(&self) -> Option<VnfType> {
        self.chain.get(self.next_vnf_index).copied()
    }

    /// DC that processed the previous VNF, if any.
    pub fn last_dc(&self) -> Option<DcId> {
        self.allocations.last().map(|&(_, dc)| dc)
    }

    /// Remaining deadline margin `D^s - elapsed`, in ms.
    pub fn slack(&self) -> f64 {
        self.e2e_limit - self.elapsed
    }

    pub fn slack_norm(&self) -> f64 {
        (self.slack() / self.e2e_limit).clamp(0.0, 1.0)
    }

    /// Fraction of the chain completed.
    pub fn progress(&self) -> f64 {
        self.next_vnf_index as f64 / self.chain.len() as f64
    }

    pub fn is_live(&self) -> bool {
        !self.is_terminal()
    }

    pub fn is_terminal(&self) -> bool {
        matches!(self.status, RequestStatus::Accepted | RequestStatus::Dropped)
    }

    /// Waiting for an allocation.
    pub fn is_waiting(&self) -> bool {
        self.status == RequestStatus::Pending
    }

    /// C5: elapsed time within the E2E budget, inclusive.
    pub fn check_deadline(&self) -> bool {
        self.elapsed <= self.e2e_limit + EPS
    }

    /// C3: one DC per completed VNF index, in order.
    pub fn allocations_consistent(&self) -> bool {
        self.allocations.len() == self.next_vnf_index
            && self.allocations.iter().enumerate().all(|(i, &(m, _))| i == m)
    }
}
