//! Random action sequences against the constraint invariants.

use rand::seq::SliceRandom;
use rand::Rng;
use sfc_core::{Action, Env, EventKind, SimConfig};

#[derive(Debug, Default, Clone, Copy)]
pub struct FuzzStats {
    pub sequences: usize,
    pub steps: usize,
    pub invalid: usize,
}

/// Runs `sequences` sequences of `len` random decisions. Consecutive
/// sequences continue the same episode until it ends, so late-episode states
/// are reached. Half the decisions are drawn from the valid ones, the rest
/// from every code including out-of-range DCs and action codes.
///
/// After every decision C1–C5 must hold, and an action the simulator flags
/// as invalid must leave the environment exactly as it was.
pub fn fuzz(base: &SimConfig, sequences: usize, len: usize, rng: &mut impl Rng) -> Result<FuzzStats, String> {
    let mut stats = FuzzStats::default();
    let mut env: Option<Env> = None;
    let mut episode = 0u64;
    for _ in 0..sequences {
        if env.as_ref().is_none_or(Env::is_done) {
            episode += 1;
            let config = SimConfig {
                seed: episode,
                ..base.clone()
            };
            env = Some(Env::generate(config).map_err(|e| e.to_string())?);
        }
        let e = env.as_mut().expect("just created");
        for _ in 0..len {
            if e.is_done() {
                break;
            }
            let n = e.dc_count();
            let (dc, action) = if rng.gen_bool(0.5) {
                let valid: Vec<(usize, Action)> = (0..n)
                    .flat_map(|dc| Action::all().map(move |a| (dc, a)))
                    .filter(|&(dc, a)| e.action_valid(dc, a))
                    .collect();
                *valid.choose(rng).expect("idle is always valid")
            } else {
                (rng.gen_range(0..n + 1), Action(rng.gen_range(0..Action::SPACE + 2)))
            };
            let mut probe = e.clone();
            let (events, _) = probe.apply_action(dc, action);
            let invalid = events.iter().any(|ev| ev.kind == EventKind::InvalidAction);
            if invalid {
                stats.invalid += 1;
                if probe != *e {
                    return Err(format!("invalid ({dc}, {action:?}) changed the state"));
                }
            }
            if invalid == e.action_valid(dc, action) {
                return Err(format!("validity predicate disagrees with the simulator for ({dc}, {action:?})"));
            }
            e.step(dc, action);
            e.check_invariants().map_err(|v| format!("after ({dc}, {action:?}) at tick {}: {v}", e.now()))?;
            stats.steps += 1;
        }
        stats.sequences += 1;
    }
    Ok(stats)
}
