//! Fixed-order numeric encodings of environment snapshots.
//!
//! Three blocks, all normalized to `[0, 1]`:
//!
//! * DC resources (17): free CPU/storage/RAM fractions, installed and busy
//!   instance counts per VNF type (divided by how many the DC could hold), and
//!   the mean and minimum free-bandwidth fraction of its incident links.
//! * DC service view (18): per SFC kind, the number of waiting requests whose
//!   next VNF could be allocated on this DC now, their minimum normalized
//!   slack, and their summed bandwidth relative to link capacity.
//! * Network view (24): per SFC kind, live request count, accepted fraction,
//!   minimum normalized slack and mean chain progress.
//!
//! Field order is part of the checkpoint contract; do not reorder.

use crate::catalog::{SfcKind, VnfType};
use crate::model::DcId;
use crate::sim::Env;

pub const DC_RESOURCE_DIM: usize = 17;
pub const DC_SFC_DIM: usize = 18;
pub const NETWORK_DIM: usize = 24;
pub const DC_STATE_DIM: usize = DC_RESOURCE_DIM + DC_SFC_DIM;

/// Request counts are divided by this and clamped (VoIP's largest bundle).
pub const DEFAULT_COUNT_CAP: f64 = 200.0;

#[derive(Debug, Clone, PartialEq)]
pub struct StateTriple {
    pub dc_resources: [f32; DC_RESOURCE_DIM],
    pub dc_sfc: [f32; DC_SFC_DIM],
    pub network: [f32; NETWORK_DIM],
}

impl StateTriple {
    pub fn zeros() -> Self {
        Self {
            dc_resources: [0.0; DC_RESOURCE_DIM],
            dc_sfc: [0.0; DC_SFC_DIM],
            network: [0.0; NETWORK_DIM],
        }
    }

    /// The DC-local part, as consumed by the DC value model.
    pub fn dc_state(&self) -> [f32; DC_STATE_DIM] {
        let mut out = [0.0; DC_STATE_DIM];
        out[..DC_RESOURCE_DIM].copy_from_slice(&self.dc_resources);
        out[DC_RESOURCE_DIM..].copy_from_slice(&self.dc_sfc);
        out
    }
}

fn norm_count(n: usize, cap: f64) -> f32 {
    (n as f64 / cap).clamp(0.0, 1.0) as f32
}

pub fn encode_dc_resources(env: &Env, dc: DcId) -> [f32; DC_RESOURCE_DIM] {
    use crate::model::Resource::*;
    let catalog = env.vnf_catalog();
    let d = env.dc(dc);
    let mut out = [0.0f32; DC_RESOURCE_DIM];
    out[0] = d.free_fraction(catalog, Compute) as f32;
    out[1] = d.free_fraction(catalog, Storage) as f32;
    out[2] = d.free_fraction(catalog, Ram) as f32;
    for v in VnfType::ALL {
        let cap = d.max_instances(catalog, v).max(1) as f64;
        out[3 + v.index()] = (d.installed(v) as f64 / cap).clamp(0.0, 1.0) as f32;
        out[9 + v.index()] = (d.busy(v) as f64 / cap).clamp(0.0, 1.0) as f32;
    }
    let fractions: Vec<f64> = env.topology().incident_links(dc).map(|l| l.free_fraction()).collect();
    if !fractions.is_empty() {
        out[15] = (fractions.iter().sum::<f64>() / fractions.len() as f64) as f32;
        out[16] = fractions.iter().copied().fold(f64::INFINITY, f64::min) as f32;
    }
    out
}

/// Whether `dc` can take one more allocation of each VNF type (idle instance
/// or room to install one).
pub fn hostable(env: &Env, dc: DcId) -> [bool; VnfType::COUNT] {
    let d = env.dc(dc);
    VnfType::ALL.map(|v| d.idle(v) > 0 || d.can_install(env.vnf_catalog(), v))
}

pub fn encode_dc_sfc(env: &Env, dc: DcId, count_cap: f64) -> [f32; DC_SFC_DIM] {
    let host = hostable(env, dc);
    let mut count = [0usize; SfcKind::COUNT];
    let mut min_slack = [1.0f64; SfcKind::COUNT];
    let mut bw = [0.0f64; SfcKind::COUNT];
    for r in env.waiting() {
        let Some(v) = r.next_vnf() else { continue };
        if !host[v.index()] || !env.can_reach(r, dc) {
            continue;
        }
        let k = r.kind.index();
        count[k] += 1;
        min_slack[k] = min_slack[k].min(r.slack_norm());
        bw[k] += r.bandwidth;
    }
    let link_bw = env.config().link_bw;
    let mut out = [0.0f32; DC_SFC_DIM];
    for k in 0..SfcKind::COUNT {
        out[3 * k] = norm_count(count[k], count_cap);
        out[3 * k + 1] = min_slack[k] as f32;
        out[3 * k + 2] = (bw[k] / link_bw).clamp(0.0, 1.0) as f32;
    }
    out
}

pub fn encode_network(env: &Env, count_cap: f64) -> [f32; NETWORK_DIM] {
    let mut live = [0usize; SfcKind::COUNT];
    let mut min_slack = [1.0f64; SfcKind::COUNT];
    let mut progress = [0.0f64; SfcKind::COUNT];
    for r in env.requests().iter().filter(|r| r.is_live()) {
        let k = r.kind.index();
        live[k] += 1;
        min_slack[k] = min_slack[k].min(r.slack_norm());
        progress[k] += r.progress();
    }
    let m = env.metrics();
    let mut out = [0.0f32; NETWORK_DIM];
    for kind in SfcKind::ALL {
        let k = kind.index();
        let generated = m.generated[kind];
        out[4 * k] = norm_count(live[k], count_cap);
        out[4 * k + 1] = if generated > 0 {
            m.accepted[kind] as f32 / generated as f32
        } else {
            0.0
        };
        out[4 * k + 2] = min_slack[k] as f32;
        out[4 * k + 3] = if live[k] > 0 { (progress[k] / live[k] as f64) as f32 } else { 0.0 };
    }
    out
}

pub fn encode_state(env: &Env, dc: DcId, count_cap: f64) -> StateTriple {
    StateTriple {
        dc_resources: encode_dc_resources(env, dc),
        dc_sfc: encode_dc_sfc(env, dc, count_cap),
        network: encode_network(env, count_cap),
    }
}

pub fn encode_dc_state(env: &Env, dc: DcId, count_cap: f64) -> [f32; DC_STATE_DIM] {
    let mut out = [0.0; DC_STATE_DIM];
    out[..DC_RESOURCE_DIM].copy_from_slice(&encode_dc_resources(env, dc));
    out[DC_RESOURCE_DIM..].copy_from_slice(&encode_dc_sfc(env, dc, count_cap));
    out
}
