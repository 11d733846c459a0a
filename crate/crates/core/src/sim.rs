//! The provisioning environment.
//!
//! Time advances in fixed ticks. Between ticks the agent makes up to
//! `decisions_per_tick` decisions, each naming a data center and an action
//! code. A placement installs an instance if no idle one exists and allocates
//! the most urgent eligible request to it; an uninstall removes an idle
//! instance; idle does nothing. Invalid attempts leave the environment
//! untouched and surface as [`EventKind::InvalidAction`].

use crate::catalog::{SfcCatalog, SfcKind, VnfCatalog, VnfType};
use crate::metrics::RunMetrics;
use crate::model::{Datacenter, DcId, NetworkTopology};
use crate::request::{RequestId, RequestStatus, SfcRequest, Stage};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

const EPS: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimConfig {
    /// ms per tick
    pub tick_ms: f64,
    pub dc_count: usize,
    /// GHz; DC capacities are spread evenly across this interval.
    pub dc_cpu_range: (f64, f64),
    /// GB
    pub dc_storage: f64,
    /// GB
    pub dc_ram: f64,
    /// Mbps
    pub link_bw: f64,
    /// ms
    pub link_prop_delay: f64,
    /// Number of independent bundle draws per SFC kind.
    pub request_count_multiplier: u32,
    /// Scales every bundle range; 0.5 gives the halved desk configuration.
    pub bundle_scale: f64,
    pub decisions_per_tick: u32,
    pub max_ticks: u64,
    pub seed: u64,
    pub vnf_catalog: VnfCatalog,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            tick_ms: 1.0,
            dc_count: 4,
            dc_cpu_range: (12.0, 120.0),
            dc_storage: 2000.0,
            dc_ram: 256.0,
            link_bw: 1000.0,
            link_prop_delay: 1.0,
            request_count_multiplier: 1,
            bundle_scale: 1.0,
            decisions_per_tick: 16,
            max_ticks: 10_000,
            seed: 0,
            vnf_catalog: VnfCatalog::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SimError {
    #[error("invalid value for `{field}`: {reason}")]
    InvalidConfig { field: &'static str, reason: String },
}

impl SimConfig {
    pub fn validate(&self) -> Result<(), SimError> {
        let bad = |field, reason: &str| {
            Err(SimError::InvalidConfig {
                field,
                reason: reason.to_string(),
            })
        };
        if !(self.tick_ms.is_finite() && self.tick_ms > 0.0) {
            return bad("tick_ms", "must be > 0");
        }
        if self.dc_count < 2 {
            return bad("dc_count", "must be at least 2");
        }
        let (lo, hi) = self.dc_cpu_range;
        if !(lo > 0.0 && lo <= hi && hi.is_finite()) {
            return bad("dc_cpu_range", "must be a positive interval");
        }
        for (field, v) in [
            ("dc_storage", self.dc_storage),
            ("dc_ram", self.dc_ram),
            ("link_bw", self.link_bw),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return bad(field, "must be > 0");
            }
        }
        if !(self.link_prop_delay.is_finite() && self.link_prop_delay >= 0.0) {
            return bad("link_prop_delay", "must be >= 0");
        }
        if !(1..=5).contains(&self.request_count_multiplier) {
            return bad("request_count_multiplier", "must be in 1..=5");
        }
        if !(self.bundle_scale.is_finite() && self.bundle_scale > 0.0) {
            return bad("bundle_scale", "must be > 0");
        }
        if self.decisions_per_tick == 0 {
            return bad("decisions_per_tick", "must be > 0");
        }
        if self.max_ticks == 0 {
            return bad("max_ticks", "must be > 0");
        }
        Ok(())
    }

    /// DC CPU capacities, evenly spread over `dc_cpu_range`.
    pub fn dc_cpus(&self) -> Vec<f64> {
        let (lo, hi) = self.dc_cpu_range;
        let n = self.dc_count;
        (0..n)
            .map(|i| if n == 1 { lo } else { lo + (hi - lo) * i as f64 / (n - 1) as f64 })
            .collect()
    }

    pub fn build_topology(&self) -> NetworkTopology {
        let dcs = self
            .dc_cpus()
            .into_iter()
            .enumerate()
            .map(|(i, cpu)| Datacenter::new(i, cpu, self.dc_storage, self.dc_ram))
            .collect();
        NetworkTopology::full_mesh(dcs, self.link_bw, self.link_prop_delay)
    }

    pub fn sfc_catalog(&self) -> SfcCatalog {
        let base = SfcCatalog::default();
        if (self.bundle_scale - 1.0).abs() < EPS {
            base
        } else {
            base.scaled_bundles(self.bundle_scale)
        }
    }
}

/// Action codes: `0..n` place VNF type `v`, `n..2n` uninstall type `v - n`,
/// `2n` idle, where `n` is the number of VNF types.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Action(pub usize);

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ActionKind {
    Place(VnfType),
    Uninstall(VnfType),
    Idle,
}

impl Action {
    pub const SPACE: usize = 2 * VnfType::COUNT + 1;
    pub const IDLE: Action = Action(2 * VnfType::COUNT);

    pub fn place(v: VnfType) -> Self {
        Action(v.index())
    }

    pub fn uninstall(v: VnfType) -> Self {
        Action(VnfType::COUNT + v.index())
    }

    pub fn kind(self) -> Option<ActionKind> {
        let n = VnfType::COUNT;
        match self.0 {
            c if c < n => Some(ActionKind::Place(VnfType::ALL[c])),
            c if c < 2 * n => Some(ActionKind::Uninstall(VnfType::ALL[c - n])),
            c if c == 2 * n => Some(ActionKind::Idle),
            _ => None,
        }
    }

    pub fn all() -> impl Iterator<Item = Action> {
        (0..Self::SPACE).map(Action)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum EventKind {
    SfcAccepted,
    SfcDropped,
    VnfAllocated,
    /// Removal of an idle instance nobody is waiting for.
    VnfUninstalled,
    /// Removal of an instance whose type is some waiting request's next VNF.
    VnfUninstalledEssential,
    InvalidAction,
    Idle,
}

impl EventKind {
    pub fn reward(self) -> f64 {
        match self {
            EventKind::SfcAccepted => 2.0,
            EventKind::SfcDropped => -1.5,
            EventKind::VnfUninstalledEssential => -0.5,
            EventKind::InvalidAction => -1.0,
            EventKind::VnfAllocated | EventKind::VnfUninstalled | EventKind::Idle => 0.0,
        }
    }
}

/// `request_id` is present for the SFC and allocation events; `dc_id` is
/// present for every kind (for drops it is the DC the request last touched,
/// or its source if it never got an allocation).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimEvent {
    pub kind: EventKind,
    pub request_id: Option<RequestId>,
    pub dc_id: Option<DcId>,
    pub tick: u64,
}

impl SimEvent {
    fn dc(kind: EventKind, dc: DcId, tick: u64) -> Self {
        Self {
            kind,
            request_id: None,
            dc_id: Some(dc),
            tick,
        }
    }

    fn request(kind: EventKind, request: RequestId, dc: DcId, tick: u64) -> Self {
        Self {
            kind,
            request_id: Some(request),
            dc_id: Some(dc),
            tick,
        }
    }
}

pub fn reward_of(events: &[SimEvent]) -> f64 {
    events.iter().map(|e| e.kind.reward()).sum()
}

/// Draws one bundle per SFC kind, `multiplier` times, with distinct uniform
/// source and destination DCs.
pub fn generate_bundles<R: Rng>(
    rng: &mut R,
    catalog: &SfcCatalog,
    multiplier: u32,
    dc_count: usize,
) -> Vec<SfcRequest> {
    assert!(dc_count >= 2, "need two DCs for distinct endpoints");
    let dcs: Vec<DcId> = (0..dc_count).collect();
    let mut out = Vec::new();
    for _ in 0..multiplier {
        for t in catalog.types() {
            let (lo, hi) = t.bundle_range;
            let size = rng.gen_range(lo..=hi);
            for _ in 0..size {
                let pair: Vec<DcId> = dcs.choose_multiple(rng, 2).copied().collect();
                let bandwidth = match t.bandwidth {
                    crate::catalog::Bandwidth::Fixed(b) => b,
                    crate::catalog::Bandwidth::Range(lo, hi) => rng.gen_range(lo..=hi),
                };
                out.push(SfcRequest::new(
                    out.len(),
                    t.kind,
                    t.chain.clone(),
                    pair[0],
                    pair[1],
                    bandwidth,
                    t.e2e_limit,
                ));
            }
        }
    }
    out
}

/// Result of one agent decision plus any time that passed after it.
#[derive(Debug, Clone, PartialEq)]
pub struct StepOutcome {
    pub events: Vec<SimEvent>,
    pub reward: f64,
    pub done: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Env {
    config: SimConfig,
    sfc_catalog: SfcCatalog,
    topology: NetworkTopology,
    requests: Vec<SfcRequest>,
    metrics: RunMetrics,
    now: u64,
    decisions_this_tick: u32,
}

impl Env {
    /// Fresh environment with bundles drawn from `config.seed`.
    pub fn generate(config: SimConfig) -> Result<Self, SimError> {
        config.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let sfc_catalog = config.sfc_catalog();
        let requests = generate_bundles(
            &mut rng,
            &sfc_catalog,
            config.request_count_multiplier,
            config.dc_count,
        );
        Self::with_requests(config, requests)
    }

    pub fn with_requests(config: SimConfig, requests: Vec<SfcRequest>) -> Result<Self, SimError> {
        config.validate()?;
        let topology = config.build_topology();
        Ok(Self::with_topology(config, topology, requests))
    }

    /// Arbitrary topology; DCs without a direct link cannot host consecutive VNFs.
    pub fn with_topology(config: SimConfig, topology: NetworkTopology, requests: Vec<SfcRequest>) -> Self {
        let sfc_catalog = config.sfc_catalog();
        let mut metrics = RunMetrics::default();
        for r in &requests {
            metrics.generated[r.kind] += 1;
        }
        Self {
            config,
            sfc_catalog,
            topology,
            requests,
            metrics,
            now: 0,
            decisions_this_tick: 0,
        }
    }

    pub fn config(&self) -> &SimConfig {
        &self.config
    }

    pub fn vnf_catalog(&self) -> &VnfCatalog {
        &self.config.vnf_catalog
    }

    pub fn sfc_catalog(&self) -> &SfcCatalog {
        &self.sfc_catalog
    }

    pub fn topology(&self) -> &NetworkTopology {
        &self.topology
    }

    pub fn topology_mut(&mut self) -> &mut NetworkTopology {
        &mut self.topology
    }

    pub fn dc_count(&self) -> usize {
        self.topology.dc_count()
    }

    pub fn dc(&self, id: DcId) -> &Datacenter {
        &self.topology.datacenters[id]
    }

    pub fn requests(&self) -> &[SfcRequest] {
        &self.requests
    }

    pub fn metrics(&self) -> &RunMetrics {
        &self.metrics
    }

    pub fn into_metrics(self) -> RunMetrics {
        self.metrics
    }

    pub fn now(&self) -> u64 {
        self.now
    }

    pub fn has_waiting(&self) -> bool {
        self.requests.iter().any(SfcRequest::is_waiting)
    }

    pub fn waiting(&self) -> impl Iterator<Item = &SfcRequest> {
        self.requests.iter().filter(|r| r.is_waiting())
    }

    pub fn live_count(&self) -> usize {
        self.requests.iter().filter(|r| r.is_live()).count()
    }

    pub fn tick_budget_exhausted(&self) -> bool {
        self.now >= self.config.max_ticks
    }

    /// No live requests remain or the tick budget is spent.
    pub fn is_done(&self) -> bool {
        self.live_count() == 0 || self.tick_budget_exhausted()
    }

    /// Whether request `r`'s next VNF may run on `dc` given link reachability
    /// and bandwidth. The first VNF may run anywhere.
    pub fn can_reach(&self, r: &SfcRequest, dc: DcId) -> bool {
        match r.last_dc() {
            None => true,
            Some(p) if p == dc => true,
            Some(p) => self
                .topology
                .link_between(p, dc)
                .is_some_and(|l| self.topology.links[l].can_reserve(r.bandwidth)),
        }
    }

    /// Waiting request to serve with a placement of `v` on `dc`: the eligible
    /// one with the least slack, lowest id on ties.
    pub fn select_candidate(&self, dc: DcId, v: VnfType) -> Option<&SfcRequest> {
        if dc >= self.dc_count() {
            return None;
        }
        self.waiting()
            .filter(|r| r.next_vnf() == Some(v) && self.can_reach(r, dc))
            .min_by(|a, b| a.slack().total_cmp(&b.slack()).then(a.id.cmp(&b.id)))
    }

    /// Whether `place(v)` on `dc` would succeed right now.
    pub fn placement_feasible(&self, dc: DcId, v: VnfType) -> bool {
        dc < self.dc_count()
            && self.select_candidate(dc, v).is_some()
            && (self.dc(dc).idle(v) > 0 || self.dc(dc).can_install(self.vnf_catalog(), v))
    }

    /// Whether `action` on `dc` would be accepted (not an InvalidAction).
    pub fn action_valid(&self, dc: DcId, action: Action) -> bool {
        if dc >= self.dc_count() {
            return false;
        }
        match action.kind() {
            Some(ActionKind::Place(v)) => self.placement_feasible(dc, v),
            Some(ActionKind::Uninstall(v)) => self.dc(dc).idle(v) > 0,
            Some(ActionKind::Idle) => true,
            None => false,
        }
    }

    fn is_essential(&self, v: VnfType) -> bool {
        self.waiting().any(|r| r.next_vnf() == Some(v))
    }

    /// Propagation delay from where `r` currently sits (its last DC, or its
    /// source before the first VNF) to `dc`.
    pub fn hop_delay(&self, r: &SfcRequest, dc: DcId) -> f64 {
        let from = r.last_dc().unwrap_or(r.source_dc);
        if from == dc {
            return 0.0;
        }
        self.topology
            .link_between(from, dc)
            .map_or(self.config.link_prop_delay, |l| self.topology.links[l].prop_delay)
    }

    /// Applies one decision without advancing time.
    pub fn apply_action(&mut self, dc: DcId, action: Action) -> (Vec<SimEvent>, f64) {
        let tick = self.now;
        let invalid = || vec![SimEvent::dc(EventKind::InvalidAction, dc, tick)];
        let events = if dc >= self.dc_count() {
            invalid()
        } else {
            match action.kind() {
                None => invalid(),
                Some(ActionKind::Idle) => vec![SimEvent::dc(EventKind::Idle, dc, tick)],
                Some(ActionKind::Uninstall(v)) => {
                    let essential = self.is_essential(v);
                    match self.topology.datacenters[dc].uninstall_vnf(v) {
                        Ok(()) => {
                            let kind = if essential {
                                EventKind::VnfUninstalledEssential
                            } else {
                                EventKind::VnfUninstalled
                            };
                            vec![SimEvent::dc(kind, dc, tick)]
                        }
                        Err(_) => invalid(),
                    }
                }
                Some(ActionKind::Place(v)) => match self.place(dc, v) {
                    Some(id) => vec![SimEvent::request(EventKind::VnfAllocated, id, dc, tick)],
                    None => invalid(),
                },
            }
        };
        let reward = reward_of(&events);
        (events, reward)
    }

    fn place(&mut self, dc: DcId, v: VnfType) -> Option<RequestId> {
        let id = self.select_candidate(dc, v)?.id;
        let catalog = &self.config.vnf_catalog;
        let host = &self.topology.datacenters[dc];
        let needs_install = host.idle(v) == 0;
        if needs_install && !host.can_install(catalog, v) {
            return None;
        }
        let r = &self.requests[id];
        let delay = self.hop_delay(r, dc);
        let bandwidth = r.bandwidth;
        let hop_link = r
            .last_dc()
            .filter(|&p| p != dc)
            .map(|p| self.topology.link_between(p, dc).expect("reachability checked"));

        // All checks passed; mutate.
        if let Some(l) = hop_link {
            self.topology.links[l]
                .reserve_bandwidth(bandwidth)
                .expect("bandwidth checked by select_candidate");
        }
        let host = &mut self.topology.datacenters[dc];
        if needs_install {
            host.install_vnf(catalog, v).expect("capacity checked");
        }
        host.occupy(v).expect("idle instance available");

        let proc_time = catalog.get(v).proc_time;
        let r = &mut self.requests[id];
        if let Some(l) = hop_link {
            r.held_links.push(l);
        }
        let (status, remaining) = if delay > 0.0 {
            (RequestStatus::InTransit, delay)
        } else {
            (RequestStatus::Processing, proc_time)
        };
        r.status = status;
        r.stage = Some(Stage { dc, vnf: v, remaining });
        Some(id)
    }

    /// Moves time forward by one tick.
    pub fn advance_tick(&mut self) -> Vec<SimEvent> {
        self.now += 1;
        self.metrics.ticks = self.now;
        let tick = self.now;
        let dt = self.config.tick_ms;
        let mut events = Vec::new();
        for i in 0..self.requests.len() {
            if self.requests[i].is_terminal() {
                continue;
            }
            self.requests[i].elapsed += dt;
            match self.requests[i].status {
                RequestStatus::InTransit => {
                    let stage = self.requests[i].stage.as_mut().expect("in-transit request has a stage");
                    stage.remaining -= dt;
                    if stage.remaining <= EPS {
                        stage.remaining = self.config.vnf_catalog.get(stage.vnf).proc_time;
                        self.requests[i].status = RequestStatus::Processing;
                    }
                }
                RequestStatus::Processing => {
                    let stage = self.requests[i].stage.as_mut().expect("processing request has a stage");
                    stage.remaining -= dt;
                    if stage.remaining <= EPS {
                        let Stage { dc, vnf, .. } = *stage;
                        self.topology.datacenters[dc].free(vnf);
                        let r = &mut self.requests[i];
                        r.stage = None;
                        r.allocations.push((r.next_vnf_index, dc));
                        r.next_vnf_index += 1;
                        if r.next_vnf_index == r.chain.len() {
                            if r.check_deadline() {
                                r.status = RequestStatus::Accepted;
                                self.metrics.accepted[r.kind] += 1;
                                self.metrics.e2e_samples[r.kind].push(r.elapsed);
                                self.metrics.accepted_bandwidth_mbps += r.bandwidth;
                                events.push(SimEvent::request(EventKind::SfcAccepted, r.id, dc, tick));
                                self.release_links(i);
                                continue;
                            }
                        } else {
                            r.status = RequestStatus::Pending;
                        }
                    }
                }
                RequestStatus::Pending => {}
                RequestStatus::Accepted | RequestStatus::Dropped => unreachable!(),
            }
            if !self.requests[i].check_deadline() {
                events.push(self.drop_request(i, tick));
            }
        }
        events
    }

    fn drop_request(&mut self, i: usize, tick: u64) -> SimEvent {
        let r = &mut self.requests[i];
        let dc = match r.stage.take() {
            Some(stage) => {
                self.topology.datacenters[stage.dc].free(stage.vnf);
                stage.dc
            }
            None => r.last_dc().unwrap_or(r.source_dc),
        };
        r.status = RequestStatus::Dropped;
        self.metrics.dropped[r.kind] += 1;
        let id = r.id;
        self.release_links(i);
        SimEvent::request(EventKind::SfcDropped, id, dc, tick)
    }

    fn release_links(&mut self, i: usize) {
        let r = &mut self.requests[i];
        for l in r.held_links.drain(..) {
            self.topology.links[l]
                .release_bandwidth(r.bandwidth)
                .expect("held reservation is present");
        }
    }

    /// One agent decision. Time advances once the tick's decision budget is
    /// spent, and keeps advancing while nothing is waiting for an allocation,
    /// so the next call always faces a decision (or the episode is over).
    pub fn step(&mut self, dc: DcId, action: Action) -> StepOutcome {
        let (mut events, _) = self.apply_action(dc, action);
        self.decisions_this_tick += 1;
        self.metrics.decisions += 1;
        if self.decisions_this_tick >= self.config.decisions_per_tick || !self.has_waiting() {
            events.extend(self.advance_to_next_decision());
        }
        let reward = reward_of(&events);
        self.metrics.total_reward += reward;
        StepOutcome {
            events,
            reward,
            done: self.is_done(),
        }
    }

    /// Advances at least one tick, then until some request is waiting or the
    /// episode ends.
    pub fn advance_to_next_decision(&mut self) -> Vec<SimEvent> {
        let mut events = Vec::new();
        loop {
            if self.is_done() {
                break;
            }
            events.extend(self.advance_tick());
            self.decisions_this_tick = 0;
            if self.has_waiting() {
                break;
            }
        }
        self.metrics.tick_budget_exhausted = self.tick_budget_exhausted() && self.live_count() > 0;
        events
    }

    /// Checks C1–C5 plus the bookkeeping invariants; returns a description of
    /// the first violation.
    pub fn check_invariants(&self) -> Result<(), String> {
        let catalog = self.vnf_catalog();
        for d in &self.topology.datacenters {
            if !d.invariants_hold(catalog) {
                return Err(format!("DC {} violates capacity or busy bounds", d.id));
            }
            for v in VnfType::ALL {
                let holders = self
                    .requests
                    .iter()
                    .filter(|r| r.is_live() && r.stage.is_some_and(|s| s.dc == d.id && s.vnf == v))
                    .count() as u32;
                if holders != d.busy(v) {
                    return Err(format!("DC {} has {} busy {v} but {holders} holders", d.id, d.busy(v)));
                }
            }
        }
        for (id, l) in self.topology.links.iter().enumerate() {
            if !l.invariants_hold() {
                return Err(format!("link {id} violates C4"));
            }
            let held: f64 = self
                .requests
                .iter()
                .filter(|r| r.is_live())
                .map(|r| r.bandwidth * r.held_links.iter().filter(|&&h| h == id).count() as f64)
                .sum();
            if (held - l.reserved()).abs() > 1e-6 * l.bw_capacity.max(1.0) {
                return Err(format!("link {id} reserves {} but requests hold {held}", l.reserved()));
            }
        }
        for r in &self.requests {
            if !r.allocations_consistent() {
                return Err(format!("request {} has inconsistent allocations (C3)", r.id));
            }
            match r.status {
                RequestStatus::Accepted => {
                    if r.next_vnf_index != r.chain.len() || !r.check_deadline() {
                        return Err(format!("request {} accepted but incomplete or late (C3/C5)", r.id));
                    }
                }
                RequestStatus::Dropped => {
                    if r.check_deadline() {
                        return Err(format!("request {} dropped within its deadline", r.id));
                    }
                }
                _ => {
                    if r.elapsed > r.e2e_limit + EPS {
                        return Err(format!("request {} is live past its deadline", r.id));
                    }
                }
            }
            if r.is_terminal() && (!r.held_links.is_empty() || r.stage.is_some()) {
                return Err(format!("terminal request {} still holds resources", r.id));
            }
        }
        for k in SfcKind::ALL {
            let live = self.requests.iter().filter(|r| r.kind == k && r.is_live()).count() as u32;
            let m = &self.metrics;
            if m.accepted[k] + m.dropped[k] + live != m.generated[k] {
                return Err(format!("conservation broken for {k}"));
            }
        }
        Ok(())
    }
}
