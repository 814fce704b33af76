//! Accuracy monitor: trips a re-initialization of the classifier after T
//! consecutive low-accuracy iterations.

use crate::error::{Error, Result};

#[derive(Debug, Clone)]
pub struct AccuracyMonitor {
    tau_acc: f64,
    t_limit: usize,
    consecutive_low: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MonitorOutcome {
    pub accuracy: f64,
    pub reinit: bool,
}

impl AccuracyMonitor {
    pub fn new(tau_acc: f64, t_limit: usize) -> Result<Self> {
        if !(0.0..=1.0).contains(&tau_acc) {
            return Err(Error::invalid("tau_acc", format!("must be in [0, 1], got {tau_acc}")));
        }
        if t_limit < 1 {
            return Err(Error::invalid("t_limit", "must be >= 1"));
        }
        Ok(AccuracyMonitor { tau_acc, t_limit, consecutive_low: 0 })
    }

    pub fn consecutive_low(&self) -> usize {
        self.consecutive_low
    }

    /// Judges one evaluated population. A prediction is correct when
    /// `score > 0.5` agrees with `fitness < threshold`, where `threshold`
    /// is the percentile computed before the population entered the memory.
    ///
    /// Accuracy below `tau_acc` increments the consecutive counter
    /// (otherwise it resets); reaching `t_limit` raises the reinit flag and
    /// resets the counter.
    pub fn update(&mut self, scored: &[(f64, f64)], threshold: f64) -> Result<MonitorOutcome> {
        if scored.is_empty() {
            return Err(Error::EmptyDataset);
        }
        for (score, fitness) in scored {
            if !score.is_finite() || !fitness.is_finite() {
                return Err(Error::NonFiniteFitness);
            }
        }
        let correct = scored
            .iter()
            .filter(|(score, fitness)| (*score > 0.5) == (*fitness < threshold))
            .count();
        let accuracy = correct as f64 / scored.len() as f64;
        let mut reinit = false;
        if accuracy < self.tau_acc {
            self.consecutive_low += 1;
            if self.consecutive_low >= self.t_limit {
                reinit = true;
                self.consecutive_low = 0;
            }
        } else {
            self.consecutive_low = 0;
        }
        Ok(MonitorOutcome { accuracy, reinit })
    }
}
