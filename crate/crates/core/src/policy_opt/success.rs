use std::collections::HashMap;

use crate::policy_opt::Trajectory;

#[derive(Clone, Debug, PartialEq)]
pub struct SuccessEntry {
    pub goal: Vec<f64>,
    pub attempts: usize,
    pub successes: usize,
}

impl SuccessEntry {
    pub fn fraction(&self) -> f64 {
        self.successes as f64 / self.attempts as f64
    }
}

/// Per-goal attempt and success counts, keyed by exact goal identity and
/// kept in first-seen order so iteration is deterministic.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct SuccessTable {
    entries: Vec<SuccessEntry>,
    index: HashMap<Vec<u64>, usize>,
}

fn key(goal: &[f64]) -> Vec<u64> {
    goal.iter().map(|v| v.to_bits()).collect()
}

impl SuccessTable {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_trajectories(trajectories: &[Trajectory]) -> Self {
        let mut table = Self::new();
        table.extend(trajectories);
        table
    }

    pub fn record(&mut self, goal: &[f64], success: bool) {
        let idx = *self.index.entry(key(goal)).or_insert_with(|| {
            self.entries.push(SuccessEntry {
                goal: goal.to_vec(),
                attempts: 0,
                successes: 0,
            });
            self.entries.len() - 1
        });
        let e = &mut self.entries[idx];
        e.attempts += 1;
        e.successes += success as usize;
    }

    pub fn extend(&mut self, trajectories: &[Trajectory]) {
        for t in trajectories {
            self.record(&t.goal, t.success);
        }
    }

    pub fn merge(&mut self, other: &SuccessTable) {
        for e in &other.entries {
            let idx = *self.index.entry(key(&e.goal)).or_insert_with(|| {
                self.entries.push(SuccessEntry {
                    goal: e.goal.clone(),
                    attempts: 0,
                    successes: 0,
                });
                self.entries.len() - 1
            });
            self.entries[idx].attempts += e.attempts;
            self.entries[idx].successes += e.successes;
        }
    }

    pub fn get(&self, goal: &[f64]) -> Option<&SuccessEntry> {
        self.index.get(&key(goal)).map(|&i| &self.entries[i])
    }

    pub fn fraction(&self, goal: &[f64]) -> Option<f64> {
        self.get(goal).map(SuccessEntry::fraction)
    }

    pub fn entries(&self) -> &[SuccessEntry] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn total_attempts(&self) -> usize {
        self.entries.iter().map(|e| e.attempts).sum()
    }

    /// Success rate over all attempts.
    pub fn mean_success(&self) -> f64 {
        let attempts = self.total_attempts();
        if attempts == 0 {
            return 0.0;
        }
        self.entries.iter().map(|e| e.successes).sum::<usize>() as f64 / attempts as f64
    }
}
