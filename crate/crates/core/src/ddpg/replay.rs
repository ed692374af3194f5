use std::collections::VecDeque;

use rand::Rng;

use super::reward::DoneReason;
use crate::nn::ACTION_DIM;
use crate::perception::OBS_DIM;

/// One environment step. Observations are stored as normalized network inputs.
#[derive(Clone, Debug, PartialEq)]
pub struct Transition {
    pub s: [f64; OBS_DIM],
    /// Normalized action (v ∈ [0, 1], ω ∈ [−1, 1]).
    pub a: [f64; ACTION_DIM],
    pub r: f64,
    pub s_next: [f64; OBS_DIM],
    pub done: bool,
    pub reason: DoneReason,
}

/// A row-major minibatch.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Batch {
    pub size: usize,
    pub states: Vec<f64>,
    pub actions: Vec<f64>,
    pub rewards: Vec<f64>,
    pub next_states: Vec<f64>,
    pub dones: Vec<bool>,
}

impl Batch {
    pub fn from_transitions<'a, I: IntoIterator<Item = &'a Transition>>(items: I) -> Self {
        let mut b = Batch::default();
        for t in items {
            b.size += 1;
            b.states.extend_from_slice(&t.s);
            b.actions.extend_from_slice(&t.a);
            b.rewards.push(t.r);
            b.next_states.extend_from_slice(&t.s_next);
            b.dones.push(t.done);
        }
        b
    }
}

/// Bounded FIFO store; the oldest transition is evicted once full.
#[derive(Clone, Debug)]
pub struct ReplayBuffer {
    items: VecDeque<Transition>,
    capacity: usize,
}

impl ReplayBuffer {
    pub fn new(capacity: usize) -> Self {
        assert!(capacity > 0, "replay capacity must be positive");
        Self {
            items: VecDeque::new(),
            capacity,
        }
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn push(&mut self, t: Transition) {
        if self.items.len() == self.capacity {
            self.items.pop_front();
        }
        self.items.push_back(t);
    }

    pub fn iter(&self) -> impl Iterator<Item = &Transition> {
        self.items.iter()
    }

    /// Uniform sample of `n` distinct transitions.
    pub fn sample<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> Batch {
        assert!(n <= self.items.len(), "cannot sample {n} from {}", self.items.len());
        let idx = rand::seq::index::sample(rng, self.items.len(), n);
        Batch::from_transitions(idx.iter().map(|i| &self.items[i]))
    }
}
