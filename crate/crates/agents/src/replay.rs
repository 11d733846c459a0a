use crate::dqn::Transition;
use rand::Rng;

/// Fixed-capacity ring buffer with uniform sampling (with replacement).
#[derive(Debug, Clone)]
pub struct ReplayBuffer {
    capacity: usize,
    items: Vec<Transition>,
    next: usize,
}

impl ReplayBuffer {
    pub fn new(capacity: usize) -> Self {
        assert!(capacity > 0, "replay capacity must be positive");
        Self {
            capacity,
            items: Vec::new(),
            next: 0,
        }
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn push(&mut self, t: Transition) {
        if self.items.len() < self.capacity {
            self.items.push(t);
        } else {
            self.items[self.next] = t;
        }
        self.next = (self.next + 1) % self.capacity;
    }

    pub fn sample<'a, R: Rng + ?Sized>(&'a self, n: usize, rng: &mut R) -> Vec<&'a Transition> {
        if self.items.is_empty() {
            return Vec::new();
        }
        (0..n).map(|_| &self.items[rng.gen_range(0..self.items.len())]).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use sfc_core::features::StateTriple;

    fn t(reward: f32) -> Transition {
        Transition {
            state: StateTriple::zeros(),
            action: 0,
            reward,
            next_state: StateTriple::zeros(),
            terminal: false,
            ticks: 1,
        }
    }

    #[test]
    fn overwrites_oldest() {
        let mut b = ReplayBuffer::new(3);
        for r in 0..5 {
            b.push(t(r as f32));
        }
        assert_eq!(b.len(), 3);
        let mut rewards: Vec<f32> = b.items.iter().map(|t| t.reward).collect();
        rewards.sort_by(f32::total_cmp);
        assert_eq!(rewards, vec![2.0, 3.0, 4.0]);
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(0);
        assert_eq!(b.sample(10, &mut rng).len(), 10);
        assert!(ReplayBuffer::new(2).sample(4, &mut rng).is_empty());
    }
}
