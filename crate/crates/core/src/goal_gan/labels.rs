use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::policy_opt::SuccessTable;

/// Inclusive success-rate band that defines goals of intermediate
/// difficulty.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GoidThresholds {
    pub r_min: f64,
    pub r_max: f64,
}

impl Default for GoidThresholds {
    fn default() -> Self {
        Self { r_min: 0.1, r_max: 0.9 }
    }
}

impl GoidThresholds {
    pub fn new(r_min: f64, r_max: f64) -> Result<Self> {
        let t = Self { r_min, r_max };
        t.validate()?;
        Ok(t)
    }

    pub fn validate(&self) -> Result<()> {
        if self.r_min > 0.0 && self.r_min < self.r_max && self.r_max < 1.0 {
            Ok(())
        } else {
            Err(Error::InvalidArgument(format!(
                "thresholds must satisfy 0 < r_min < r_max < 1, got ({}, {})",
                self.r_min, self.r_max
            )))
        }
    }

    pub fn contains(&self, fraction: f64) -> bool {
        self.r_min <= fraction && fraction <= self.r_max
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct LabeledGoal {
    pub goal: Vec<f64>,
    pub fraction: f64,
    pub label: bool,
}

impl LabeledGoal {
    pub fn y(&self) -> f64 {
        if self.label {
            1.0
        } else {
            0.0
        }
    }
}

/// One labeled goal per table entry, in table order.
pub fn label_goals(table: &SuccessTable, thresholds: GoidThresholds) -> Vec<LabeledGoal> {
    table
        .entries()
        .iter()
        .map(|e| {
            let fraction = e.fraction();
            LabeledGoal {
                goal: e.goal.clone(),
                fraction,
                label: thresholds.contains(fraction),
            }
        })
        .collect()
}

pub fn positive_fraction(labeled: &[LabeledGoal]) -> f64 {
    if labeled.is_empty() {
        return 0.0;
    }
    labeled.iter().filter(|l| l.label).count() as f64 / labeled.len() as f64
}
