use std::collections::VecDeque;

use rand::Rng as _;

use crate::rng::Rng;
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct Transition {
    pub state: Vec<f64>,
    pub action: Vec<f64>,
    pub reward: f64,
}

impl Transition {
    pub fn is_finite(&self) -> bool {
        self.reward.is_finite()
            && self.state.iter().all(|x| x.is_finite())
            && self.action.iter().all(|x| x.is_finite())
    }
}

/// Fixed-capacity FIFO store of transitions.
#[derive(Debug, Clone)]
pub struct ReplayBuffer {
    capacity: usize,
    items: VecDeque<Transition>,
}

/// Column-stacked batch ready for a graph.
#[derive(Debug, Clone)]
pub struct Batch {
    pub size: usize,
    pub states: Vec<f64>,
    pub actions: Vec<f64>,
    pub rewards: Vec<f64>,
}

impl ReplayBuffer {
    pub fn new(capacity: usize) -> Result<Self> {
        if capacity == 0 {
            return Err(Error::config("replay_capacity", "must be at least 1"));
        }
        Ok(Self {
            capacity,
            items: VecDeque::with_capacity(capacity.min(1 << 16)),
        })
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

    pub fn get(&self, i: usize) -> Option<&Transition> {
        self.items.get(i)
    }

    /// Appends, evicting the oldest entry when full.
    pub fn push(&mut self, t: Transition) -> Result<()> {
        if !t.is_finite() {
            return Err(Error::NonFinite("transition".into()));
        }
        if self.items.len() == self.capacity {
            self.items.pop_front();
        }
        self.items.push_back(t);
        Ok(())
    }

    /// Uniform draw with replacement.
    pub fn sample(&self, size: usize, rng: &mut Rng) -> Result<Batch> {
        if self.items.is_empty() {
            return Err(Error::shape("cannot sample an empty replay buffer"));
        }
        let picks: Vec<usize> = (0..size).map(|_| rng.random_range(0..self.items.len())).collect();
        Ok(self.gather(&picks))
    }

    /// Batch made of the given entries, in order.
    pub fn gather(&self, picks: &[usize]) -> Batch {
        let mut b = Batch {
            size: picks.len(),
            states: Vec::new(),
            actions: Vec::new(),
            rewards: Vec::with_capacity(picks.len()),
        };
        for &i in picks {
            let t = &self.items[i];
            b.states.extend_from_slice(&t.state);
            b.actions.extend_from_slice(&t.action);
            b.rewards.push(t.reward);
        }
        b
    }
}
