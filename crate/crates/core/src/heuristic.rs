//! Rule-based baseline.
//!
//! The waiting request with the least slack (lowest id on ties) is served:
//!
//! 1. If a reachable DC has an idle instance of the request's next VNF,
//!    allocate there, nearest by propagation delay (lowest id on ties).
//! 2. Otherwise install on the reachable DC with the largest free compute
//!    fraction that has room (lowest id on ties).
//! 3. Otherwise idle on DC 0.
//!
//! These rules never uninstall anything, so once idle instances of the wrong
//! types fill every DC the baseline stalls. [`heuristic_step_extended`] adds
//! two rules for comparison: when a request is blocked, uninstall an idle
//! instance of another type if that makes room for it on a reachable DC
//! (types no waiting request needs first, then the most idle copies, then
//! lowest index); failing that, try the next most urgent request.

use crate::catalog::{VnfCatalog, VnfCatalogEntry, VnfType};
use crate::episode::Policy;
use crate::model::{Datacenter, DcId, Resource};
use crate::request::SfcRequest;
use crate::sim::{Action, Env};

fn by_urgency(env: &Env) -> Vec<&SfcRequest> {
    let mut queue: Vec<&SfcRequest> = env.waiting().collect();
    queue.sort_by(|a, b| a.slack().total_cmp(&b.slack()).then(a.id.cmp(&b.id)));
    queue
}

/// One decision of the baseline for the current snapshot.
pub fn heuristic_step(env: &Env) -> (DcId, Action) {
    by_urgency(env)
        .first()
        .and_then(|r| serve(env, r, false))
        .unwrap_or((0, Action::IDLE))
}

/// The baseline with idle-instance reclamation and skipping of blocked requests.
pub fn heuristic_step_extended(env: &Env) -> (DcId, Action) {
    by_urgency(env)
        .into_iter()
        .find_map(|r| serve(env, r, true))
        .unwrap_or((0, Action::IDLE))
}

fn serve(env: &Env, r: &SfcRequest, reclaim: bool) -> Option<(DcId, Action)> {
    let v = r.next_vnf()?;
    let reachable: Vec<DcId> = (0..env.dc_count()).filter(|&dc| env.can_reach(r, dc)).collect();

    let nearest_idle = reachable
        .iter()
        .copied()
        .filter(|&dc| env.dc(dc).idle(v) > 0)
        .min_by(|&a, &b| env.hop_delay(r, a).total_cmp(&env.hop_delay(r, b)).then(a.cmp(&b)));
    if let Some(dc) = nearest_idle {
        return Some((dc, Action::place(v)));
    }

    let catalog = env.vnf_catalog();
    let roomiest = reachable
        .iter()
        .copied()
        .filter(|&dc| env.dc(dc).can_install(catalog, v))
        .max_by(|&a, &b| {
            let fa = env.dc(a).free_fraction(catalog, Resource::Compute);
            let fb = env.dc(b).free_fraction(catalog, Resource::Compute);
            fa.total_cmp(&fb).then(b.cmp(&a))
        });
    if let Some(dc) = roomiest {
        return Some((dc, Action::place(v)));
    }
    if !reclaim {
        return None;
    }

    let reclaimable = reachable
        .iter()
        .copied()
        .filter(|&dc| fits_after_reclaim(env.dc(dc), catalog, v))
        .max_by(|&a, &b| {
            let fa = env.dc(a).free_fraction(catalog, Resource::Compute);
            let fb = env.dc(b).free_fraction(catalog, Resource::Compute);
            fa.total_cmp(&fb).then(b.cmp(&a))
        })?;
    let needed: Vec<VnfType> = env.waiting().filter_map(|r| r.next_vnf()).collect();
    let victim = VnfType::ALL
        .into_iter()
        .filter(|&u| u != v && env.dc(reclaimable).idle(u) > 0)
        .min_by_key(|&u| (needed.contains(&u), std::cmp::Reverse(env.dc(reclaimable).idle(u)), u))?;
    Some((reclaimable, Action::uninstall(victim)))
}

/// Whether `v` would fit on `dc` once every idle instance of another type is gone.
fn fits_after_reclaim(dc: &Datacenter, catalog: &VnfCatalog, v: VnfType) -> bool {
    let idle_sum = |demand: fn(&VnfCatalogEntry) -> f64| -> f64 {
        VnfType::ALL
            .into_iter()
            .filter(|&u| u != v)
            .map(|u| dc.idle(u) as f64 * demand(catalog.get(u)))
            .sum()
    };
    let e = catalog.get(v);
    idle_sum(|e| e.storage_demand) > 0.0
        && dc.used_storage(catalog) - idle_sum(|e| e.storage_demand) + e.storage_demand <= dc.storage_capacity
        && dc.used_cpu(catalog) - idle_sum(|e| e.cpu_demand) + e.cpu_demand <= dc.cpu_capacity
        && dc.used_ram(catalog) - idle_sum(|e| e.ram_demand) + e.ram_demand <= dc.ram_capacity
}

/// The baseline as a [`Policy`]; `extended` selects [`heuristic_step_extended`].
#[derive(Debug, Clone, Copy, Default)]
pub struct Heuristic {
    pub extended: bool,
}

impl Heuristic {
    pub fn extended() -> Self {
        Self { extended: true }
    }
}

impl Policy for Heuristic {
    fn decide(&mut self, env: &Env) -> (DcId, Action) {
        if self.extended {
            heuristic_step_extended(env)
        } else {
            heuristic_step(env)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::catalog::{SfcCatalog, SfcKind, VnfCatalog, VnfType};
    use crate::sim::{EventKind, SimConfig};

    fn cfg(n: usize) -> SimConfig {
        SimConfig {
            dc_count: n,
            dc_cpu_range: (64.0, 64.0),
            ..SimConfig::default()
        }
    }

    fn request(kind: SfcKind, source: DcId) -> SfcRequest {
        let t = SfcCatalog::default().get(kind).clone();
        SfcRequest::new(0, kind, t.chain, source, (source + 1) % 2, t.bandwidth.max(), t.e2e_limit)
    }

    #[test]
    fn uses_idle_instance_on_source() {
        let mut env = Env::with_requests(cfg(2), vec![request(SfcKind::Ind40, 1)]).unwrap();
        env.topology_mut().datacenters[1].install_vnf(&VnfCatalog::default(), VnfType::Nat).unwrap();
        assert_eq!(heuristic_step(&env), (1, Action::place(VnfType::Nat)));
    }

    #[test]
    fn installs_on_emptiest_dc() {
        let config = SimConfig {
            dc_count: 2,
            ..SimConfig::default()
        };
        let env = Env::with_requests(config, vec![request(SfcKind::Ind40, 0)]).unwrap();
        // DC 1 has 120 GHz, DC 0 has 12 GHz; both empty, tie on fraction → lowest id.
        assert_eq!(heuristic_step(&env), (0, Action::place(VnfType::Nat)));
        let mut env = env;
        env.topology_mut().datacenters[0].install_vnf(&VnfCatalog::default(), VnfType::Fw).unwrap();
        env.topology_mut().datacenters[0].occupy(VnfType::Fw).unwrap();
        assert_eq!(heuristic_step(&env), (1, Action::place(VnfType::Nat)));
    }

    #[test]
    fn idles_when_nothing_fits() {
        let config = SimConfig {
            dc_count: 2,
            dc_cpu_range: (4.0, 4.0),
            ..SimConfig::default()
        };
        let mut r = request(SfcKind::Ind40, 0);
        r.allocations.push((0, 0));
        r.next_vnf_index = 1;
        let mut env = Env::with_requests(config, vec![r]).unwrap();
        // Both DCs are full with busy NATs and the link is saturated.
        for dc in 0..2 {
            env.topology_mut().datacenters[dc].install_vnf(&VnfCatalog::default(), VnfType::Nat).unwrap();
            env.topology_mut().datacenters[dc].occupy(VnfType::Nat).unwrap();
        }
        env.topology_mut().links[0].reserve_bandwidth(1000.0).unwrap();
        assert_eq!(heuristic_step(&env), (0, Action::IDLE));
    }

    #[test]
    fn reclaims_idle_instances_of_other_types() {
        let config = SimConfig {
            dc_count: 2,
            dc_cpu_range: (12.0, 12.0),
            ..SimConfig::default()
        };
        let mut env = Env::with_requests(config, vec![request(SfcKind::Ind40, 0)]).unwrap();
        let catalog = VnfCatalog::default();
        for dc in 0..2 {
            for v in [VnfType::Fw, VnfType::Fw] {
                env.topology_mut().datacenters[dc].install_vnf(&catalog, v).unwrap();
            }
        }
        // 12 GHz holds two FWs, no room for the NAT until one FW goes.
        assert!(!env.dc(0).can_install(&catalog, VnfType::Nat));
        assert_eq!(heuristic_step(&env), (0, Action::IDLE));
        assert_eq!(heuristic_step_extended(&env), (0, Action::uninstall(VnfType::Fw)));
        let out = env.step(0, Action::uninstall(VnfType::Fw));
        assert!(out.events.iter().all(|e| e.kind == EventKind::VnfUninstalled));
        assert_eq!(heuristic_step_extended(&env), (0, Action::place(VnfType::Nat)));
    }

    #[test]
    fn nothing_waiting_idles_on_first_dc() {
        let env = Env::with_requests(cfg(2), vec![]).unwrap();
        assert_eq!(heuristic_step(&env), (0, Action::IDLE));
    }

    #[test]
    fn never_invalid_when_it_claims_feasibility() {
        for seed in 0..5 {
            let env = Env::generate(SimConfig { seed, dc_count: 3, ..SimConfig::default() }).unwrap();
            for step in [heuristic_step, heuristic_step_extended] {
                let mut env = env.clone();
                while !env.is_done() {
                    let (dc, action) = step(&env);
                    assert_eq!(step(&env), (dc, action), "deterministic");
                    let out = env.step(dc, action);
                    assert!(out.events.iter().all(|e| e.kind != EventKind::InvalidAction));
                }
                env.check_invariants().unwrap();
            }
        }
    }
}
