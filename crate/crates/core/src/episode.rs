//! Episode driver: a DC selector picks where to act, an action agent picks
//! what to do there, and the environment applies it.

use crate::metrics::RunMetrics;
use crate::model::DcId;
use crate::sim::{Action, Env, StepOutcome};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub trait DcSelector {
    fn select_dc(&mut self, env: &Env) -> DcId;
}

pub trait ActionAgent {
    fn act(&mut self, env: &Env, dc: DcId) -> Action;
}

/// A complete decision maker.
pub trait Policy {
    fn decide(&mut self, env: &Env) -> (DcId, Action);
}

/// Composes a DC selector with an action agent.
pub struct Pipeline<S, A> {
    pub selector: S,
    pub agent: A,
}

impl<S: DcSelector, A: ActionAgent> Policy for Pipeline<S, A> {
    fn decide(&mut self, env: &Env) -> (DcId, Action) {
        let dc = self.selector.select_dc(env);
        (dc, self.agent.act(env, dc))
    }
}

impl<P: Policy + ?Sized> Policy for &mut P {
    fn decide(&mut self, env: &Env) -> (DcId, Action) {
        (**self).decide(env)
    }
}

impl<P: Policy + ?Sized> Policy for Box<P> {
    fn decide(&mut self, env: &Env) -> (DcId, Action) {
        (**self).decide(env)
    }
}

/// Uniform random DC.
#[derive(Debug, Clone)]
pub struct RandomDc {
    rng: ChaCha8Rng,
}

impl RandomDc {
    pub fn new(seed: u64) -> Self {
        Self {
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }
}

impl DcSelector for RandomDc {
    fn select_dc(&mut self, env: &Env) -> DcId {
        self.rng.gen_range(0..env.dc_count())
    }
}

#[derive(Debug, Clone, Default)]
pub struct RoundRobinDc {
    next: DcId,
}

impl DcSelector for RoundRobinDc {
    fn select_dc(&mut self, env: &Env) -> DcId {
        let dc = self.next % env.dc_count();
        self.next = dc + 1;
        dc
    }
}

#[derive(Debug, Clone, Copy)]
pub struct FixedDc(pub DcId);

impl DcSelector for FixedDc {
    fn select_dc(&mut self, _env: &Env) -> DcId {
        self.0
    }
}

/// One applied decision, as seen by a hook.
pub struct StepRecord<'a> {
    /// Snapshot before the decision; only taken when the hook asks for it.
    pub before: Option<&'a Env>,
    pub after: &'a Env,
    pub dc: DcId,
    pub action: Action,
    pub outcome: &'a StepOutcome,
}

pub trait EpisodeHook {
    /// Whether `on_step` needs the pre-decision snapshot (costs a clone per step).
    fn wants_before(&self) -> bool {
        false
    }

    fn on_step(&mut self, record: &StepRecord<'_>);
}

pub struct NoHook;

impl EpisodeHook for NoHook {
    fn on_step(&mut self, _: &StepRecord<'_>) {}
}

impl<F: FnMut(&StepRecord<'_>)> EpisodeHook for F {
    fn on_step(&mut self, record: &StepRecord<'_>) {
        self(record)
    }
}

/// Runs `env` to completion (no live requests) or to its tick budget.
pub fn run_episode<P: Policy, H: EpisodeHook>(env: &mut Env, policy: &mut P, hook: &mut H) -> RunMetrics {
    if !env.is_done() && !env.has_waiting() {
        env.advance_to_next_decision();
    }
    while !env.is_done() {
        let (dc, action) = policy.decide(env);
        let before = hook.wants_before().then(|| env.clone());
        let outcome = env.step(dc, action);
        hook.on_step(&StepRecord {
            before: before.as_ref(),
            after: env,
            dc,
            action,
            outcome: &outcome,
        });
    }
    env.metrics().clone()
}
