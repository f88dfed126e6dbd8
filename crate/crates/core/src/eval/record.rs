use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::datasets::RunOrder;
use crate::error::{Error, Result};

/// Accuracies measured right after one task of a run was trained.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepLog {
    pub step: usize,
    pub trained_task: usize,
    /// Task id to accuracy, over every task trained so far.
    pub per_task_acc: BTreeMap<usize, f64>,
    pub acc_a: f64,
    pub acc_w: f64,
}

/// Outcome of training one task order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub run_id: usize,
    pub order: RunOrder,
    /// Final accuracy indexed by task id.
    pub final_acc: Vec<f64>,
    pub acc_a_trace: Vec<f64>,
    pub acc_a: f64,
    pub acc_w: f64,
    pub steps: Vec<StepLog>,
}

impl RunRecord {
    pub fn from_steps(run_id: usize, order: RunOrder, steps: Vec<StepLog>) -> Result<Self> {
        let last = steps
            .last()
            .ok_or_else(|| Error::Precondition("run record needs at least one step".into()))?;
        let k = order.len();
        let mut final_acc = vec![f64::NAN; k];
        for (&t, &a) in &last.per_task_acc {
            if t >= k {
                return Err(Error::IndexOutOfRange { index: t, len: k });
            }
            final_acc[t] = a;
        }
        if final_acc.iter().any(|a| a.is_nan()) {
            return Err(Error::Precondition("final step does not cover every task".into()));
        }
        Ok(Self {
            run_id,
            acc_a_trace: steps.iter().map(|s| s.acc_a).collect(),
            acc_a: last.acc_a,
            acc_w: last.acc_w,
            order,
            final_acc,
            steps,
        })
    }

    /// Final accuracy of the task trained at `position`.
    pub fn acc_at_position(&self, position: usize) -> f64 {
        self.final_acc[self.order.permutation[position]]
    }
}
