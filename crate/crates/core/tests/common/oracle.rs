//! Exhaustive placement oracle for a single short chain on two DCs.
//!
//! A schedule assigns every VNF of the chain to a DC. The oracle decides its
//! feasibility from first principles, without the simulator:
//!
//! * every VNF fits on its DC on its own (earlier instances are idle by then
//!   and can be uninstalled);
//! * every DC change reserves the request's bandwidth on the link until the
//!   chain finishes, so `k` changes need `k × bandwidth` of link capacity;
//! * each stage takes `⌈transit⌉ + ⌈processing⌉` whole ticks, the transit
//!   being the propagation delay when the DC differs from where the request
//!   sits (its source before the first VNF), and the total must fit the
//!   deadline.

use rand::Rng;
use sfc_core::{
    Action, Datacenter, DcId, Env, LogicalLink, NetworkTopology, RequestStatus, SfcCatalog, SfcKind, SfcRequest,
    SimConfig, VnfCatalog, VnfType,
};

const EPS: f64 = 1e-9;

#[derive(Debug, Clone)]
pub struct MicroInstance {
    /// (cpu GHz, storage GB, ram GB) per DC.
    pub caps: [(f64, f64, f64); 2],
    pub link_bw: f64,
    pub prop_delay: f64,
    pub kind: SfcKind,
    pub source: DcId,
    pub bandwidth: f64,
    pub e2e_limit: f64,
}

pub fn random_instance(rng: &mut impl Rng) -> MicroInstance {
    let kind = if rng.gen_bool(0.5) { SfcKind::Ind40 } else { SfcKind::Miot };
    let t = SfcCatalog::default().get(kind).clone();
    let cap = |rng: &mut dyn rand::RngCore| (rng.gen_range(3.0..14.0), rng.gen_range(80.0..400.0), rng.gen_range(6.0..32.0));
    MicroInstance {
        caps: [cap(rng), cap(rng)],
        link_bw: rng.gen_range(10.0..160.0),
        prop_delay: [0.0, 0.5, 1.0, 1.5, 2.0, 3.0][rng.gen_range(0..6)],
        kind,
        source: rng.gen_range(0..2),
        bandwidth: rng.gen_range(t.bandwidth.min()..=t.bandwidth.max()),
        e2e_limit: t.e2e_limit * rng.gen_range(0.4..1.2),
    }
}

fn chain(kind: SfcKind) -> Vec<VnfType> {
    SfcCatalog::default().get(kind).chain.clone()
}

fn whole_ticks(ms: f64, tick: f64) -> f64 {
    if ms <= EPS {
        0.0
    } else {
        (ms / tick - EPS).ceil()
    }
}

/// Every DC assignment of the chain.
pub fn schedules(len: usize) -> Vec<Vec<DcId>> {
    (0..1usize << len).map(|bits| (0..len).map(|i| (bits >> i) & 1).collect()).collect()
}

pub fn feasible(inst: &MicroInstance, schedule: &[DcId]) -> bool {
    let catalog = VnfCatalog::default();
    let tick = SimConfig::default().tick_ms;
    let chain = chain(inst.kind);
    let fits = chain.iter().zip(schedule).all(|(&v, &dc)| {
        let e = catalog.get(v);
        let (cpu, storage, ram) = inst.caps[dc];
        e.cpu_demand <= cpu + EPS && e.storage_demand <= storage + EPS && e.ram_demand <= ram + EPS
    });
    let hops = schedule.windows(2).filter(|w| w[0] != w[1]).count() as f64;
    let links_ok = hops * inst.bandwidth <= inst.link_bw + EPS;
    let mut at = inst.source;
    let mut ticks = 0.0;
    for (&v, &dc) in chain.iter().zip(schedule) {
        let transit = if dc == at { 0.0 } else { inst.prop_delay };
        ticks += whole_ticks(transit, tick) + whole_ticks(catalog.get(v).proc_time, tick);
        at = dc;
    }
    fits && links_ok && ticks * tick <= inst.e2e_limit + EPS
}

pub fn build_env(inst: &MicroInstance) -> Env {
    let dcs = (0..2)
        .map(|i| {
            let (cpu, storage, ram) = inst.caps[i];
            Datacenter::new(i, cpu, storage, ram)
        })
        .collect();
    let link = LogicalLink::new(0, 1, inst.link_bw, inst.prop_delay);
    let topology = NetworkTopology::new(dcs, vec![link]).expect("two DCs, one link");
    let request = SfcRequest::new(
        0,
        inst.kind,
        chain(inst.kind),
        inst.source,
        1 - inst.source,
        inst.bandwidth,
        inst.e2e_limit,
    );
    let config = SimConfig {
        dc_count: 2,
        link_bw: inst.link_bw,
        link_prop_delay: inst.prop_delay,
        ..SimConfig::default()
    };
    Env::with_topology(config, topology, vec![request])
}

/// Drives the simulator along `schedule`: before each placement, idle
/// instances of other types on the target DC are uninstalled while the VNF
/// does not fit. Returns whether the request was accepted.
pub fn simulate(inst: &MicroInstance, schedule: &[DcId]) -> Result<bool, String> {
    let mut env = build_env(inst);
    let catalog = VnfCatalog::default();
    let mut steps = 0;
    while !env.is_done() {
        steps += 1;
        if steps > 100_000 {
            return Err("episode did not terminate".into());
        }
        let r = &env.requests()[0];
        let (dc, action) = if r.is_waiting() {
            let i = r.next_vnf_index;
            let (dc, v) = (schedule[i], r.chain[i]);
            let d = env.dc(dc);
            let victim = VnfType::ALL.into_iter().find(|&u| u != v && d.idle(u) > 0);
            match victim {
                Some(u) if d.idle(v) == 0 && !d.can_install(&catalog, v) => (dc, Action::uninstall(u)),
                _ => (dc, Action::place(v)),
            }
        } else {
            (0, Action::IDLE)
        };
        env.step(dc, action);
        env.check_invariants()?;
    }
    Ok(env.requests()[0].status == RequestStatus::Accepted)
}

/// Checks every schedule of `inst`; returns whether any is feasible.
pub fn check_instance(inst: &MicroInstance) -> Result<bool, String> {
    let mut any = false;
    for s in schedules(chain(inst.kind).len()) {
        let expected = feasible(inst, &s);
        let accepted = simulate(inst, &s)?;
        if expected != accepted {
            return Err(format!("schedule {s:?}: oracle says {expected}, simulator accepted={accepted}; {inst:?}"));
        }
        any |= expected;
    }
    Ok(any)
}
