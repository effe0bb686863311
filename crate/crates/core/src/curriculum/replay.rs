use rand::seq::index;

use crate::envs::distance;
use crate::rng::Rng;

/// Past goals kept pairwise more than `epsilon` apart.
#[derive(Clone, Debug, PartialEq)]
pub struct ReplayBuffer {
    goals: Vec<Vec<f64>>,
    epsilon: f64,
}

impl ReplayBuffer {
    pub fn new(epsilon: f64) -> Self {
        Self {
            goals: Vec::new(),
            epsilon,
        }
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn goals(&self) -> &[Vec<f64>] {
        &self.goals
    }

    pub fn len(&self) -> usize {
        self.goals.len()
    }

    pub fn is_empty(&self) -> bool {
        self.goals.is_empty()
    }

    /// Store `goal` if it is farther than epsilon from every stored goal.
    pub fn insert(&mut self, goal: &[f64]) -> bool {
        if self.goals.iter().any(|g| distance(g, goal) <= self.epsilon) {
            return false;
        }
        self.goals.push(goal.to_vec());
        true
    }

    /// Offer `goals` in order; returns how many were stored.
    pub fn update(&mut self, goals: &[Vec<f64>]) -> usize {
        goals.iter().filter(|g| self.insert(g)).count()
    }

    /// Up to `count` distinct stored goals chosen uniformly; the whole
    /// buffer (in storage order) when it holds no more than `count`.
    pub fn sample(&self, count: usize, rng: &mut Rng) -> Vec<Vec<f64>> {
        if self.goals.len() <= count {
            return self.goals.clone();
        }
        index::sample(rng, self.goals.len(), count)
            .into_iter()
            .map(|i| self.goals[i].clone())
            .collect()
    }

    /// Smallest pairwise distance among stored goals (infinite below two).
    pub fn min_pairwise_distance(&self) -> f64 {
        let mut best = f64::INFINITY;
        for i in 0..self.goals.len() {
            for j in i + 1..self.goals.len() {
                best = best.min(distance(&self.goals[i], &self.goals[j]));
            }
        }
        best
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn insertion_rule() {
        let mut b = ReplayBuffer::new(0.3);
        assert!(b.insert(&[0.0, 0.0]));
        assert!(!b.insert(&[0.1, 0.0]));
        assert!(!b.insert(&[0.3, 0.0]));
        assert!(b.insert(&[1.0, 0.0]));
        assert_eq!(b.len(), 2);
    }

    #[test]
    fn small_buffer_sample_returns_everything() {
        let mut b = ReplayBuffer::new(0.3);
        b.update(&[vec![0.0], vec![1.0], vec![2.0]]);
        let mut rng = crate::rng::SeedStreams::new(0).stream(crate::rng::Stream::GoalSampling);
        assert_eq!(b.sample(100, &mut rng).len(), 3);
        let mut big = ReplayBuffer::new(0.3);
        big.update(&(0..200).map(|i| vec![i as f64]).collect::<Vec<_>>());
        let s = big.sample(100, &mut rng);
        assert_eq!(s.len(), 100);
        let mut keys: Vec<i64> = s.iter().map(|g| g[0] as i64).collect();
        keys.dedup();
        keys.sort();
        keys.dedup();
        assert_eq!(keys.len(), 100);
    }

    proptest! {
        #[test]
        fn separation_holds_after_updates(points in prop::collection::vec((-2.0f64..2.0, -2.0f64..2.0), 1..200)) {
            let mut b = ReplayBuffer::new(0.3);
            let goals: Vec<Vec<f64>> = points.iter().map(|&(x, y)| vec![x, y]).collect();
            b.update(&goals);
            prop_assert!(b.min_pairwise_distance() > 0.3);
            // Every rejected goal is within epsilon of something stored.
            for g in &goals {
                prop_assert!(b.goals().iter().any(|s| distance(s, g) <= 0.3));
            }
        }
    }
}
