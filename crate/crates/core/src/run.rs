//! Types shared by the two marching drivers.

use std::time::{Duration, Instant};

use crate::error::{Error, Result};
use crate::grid::{DomainConfig, Field2D};

/// What to do when an a-priori CFL check fails.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum CflPolicy {
    /// Report and keep going; the divergence guard still applies.
    #[default]
    Warn,
    Error,
}

#[derive(Debug, Clone)]
pub struct RunOptions {
    /// Steps to take; `None` marches all `N_sigma` steps.
    pub n_steps: Option<usize>,
    /// Step indices (`0..=n_steps`) at which the field is recorded.
    pub snapshot_steps: Vec<usize>,
    /// Abort once the elapsed or projected wall time exceeds this.
    pub budget: Option<Duration>,
    /// `max |V|` above which the run is declared unstable.
    pub divergence_bound: f64,
    /// Bound on `max |V|` assumed by the a-priori CFL check.
    pub cfl_v_max: f64,
    pub cfl_policy: CflPolicy,
}

impl Default for RunOptions {
    fn default() -> Self {
        RunOptions {
            n_steps: None,
            snapshot_steps: Vec::new(),
            budget: None,
            divergence_bound: 10.0,
            cfl_v_max: 5.0,
            cfl_policy: CflPolicy::Warn,
        }
    }
}

impl RunOptions {
    pub fn steps(&self, config: &DomainConfig) -> usize {
        self.n_steps.unwrap_or(config.n_sigma).min(config.n_sigma)
    }
}

/// Wall time of one step, split into the nonlinear/variable-coefficient
/// part and the linear part.
///
/// For the exponential integrator `nonlinear` is the two WENO5 evaluations
/// and `linear` the four transforms plus the multiplier updates. For the
/// splitting scheme `nonlinear` is the Godunov step and `linear` the
/// remaining three sub-flows.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct StepTiming {
    pub total_s: f64,
    pub nonlinear_s: f64,
    pub linear_s: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Snapshot {
    pub step: usize,
    pub sigma: f64,
    pub field: Field2D,
}

#[derive(Debug, Clone)]
pub struct RunOutput {
    pub final_field: Field2D,
    pub final_step: usize,
    pub final_sigma: f64,
    pub snapshots: Vec<Snapshot>,
    /// `max_n ||V^n||_inf` over all visited steps, including the initial one.
    pub max_abs: f64,
    pub steps: Vec<StepTiming>,
    pub total_s: f64,
}

impl RunOutput {
    pub fn mean_step(&self) -> StepTiming {
        let n = self.steps.len().max(1) as f64;
        let mut acc = StepTiming::default();
        for s in &self.steps {
            acc.total_s += s.total_s;
            acc.nonlinear_s += s.nonlinear_s;
            acc.linear_s += s.linear_s;
        }
        StepTiming {
            total_s: acc.total_s / n,
            nonlinear_s: acc.nonlinear_s / n,
            linear_s: acc.linear_s / n,
        }
    }

    pub fn snapshot_at(&self, step: usize) -> Option<&Snapshot> {
        self.snapshots.iter().find(|s| s.step == step)
    }
}

/// Default snapshot steps: ten evenly spaced sigma values plus the comparison
/// checkpoints 41 and 115 when they fall inside the run.
pub fn default_snapshot_steps(config: &DomainConfig, n_steps: usize) -> Vec<usize> {
    let sigma_end = config.sigma_at(n_steps);
    let mut steps: Vec<usize> = (1..=10)
        .map(|i| config.nearest_step(sigma_end * i as f64 / 10.0))
        .collect();
    for sigma in [41.0, 115.0] {
        if sigma <= sigma_end {
            steps.push(config.nearest_step(sigma));
        }
    }
    steps.retain(|&s| s <= n_steps);
    steps.sort_unstable();
    steps.dedup();
    steps
}

/// Tracks elapsed time against an optional budget.
pub(crate) struct BudgetClock {
    start: Instant,
    budget: Option<Duration>,
}

impl BudgetClock {
    pub(crate) fn new(budget: Option<Duration>) -> Self {
        BudgetClock {
            start: Instant::now(),
            budget,
        }
    }

    pub(crate) fn elapsed(&self) -> f64 {
        self.start.elapsed().as_secs_f64()
    }

    /// Fails when the elapsed time, or the linear projection to
    /// `total_steps`, exceeds the budget.
    pub(crate) fn check(&self, done: usize, total_steps: usize) -> Result<()> {
        let Some(budget) = self.budget else {
            return Ok(());
        };
        let elapsed = self.elapsed();
        let projected = if done == 0 {
            elapsed
        } else {
            elapsed / done as f64 * total_steps as f64
        };
        if elapsed > budget.as_secs_f64() || projected > budget.as_secs_f64() {
            return Err(Error::BudgetExceeded {
                budget_s: budget.as_secs_f64(),
                elapsed_s: elapsed,
                projected_s: projected,
            });
        }
        Ok(())
    }
}

pub(crate) fn guard(sigma: f64, max_abs: f64, bound: f64) -> Result<()> {
    if !max_abs.is_finite() || max_abs > bound {
        return Err(Error::Instability { sigma, max_abs });
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_snapshots_include_comparison_checkpoints() {
        let cfg = DomainConfig::default();
        let s = default_snapshot_steps(&cfg, cfg.n_sigma);
        assert!(s.contains(&cfg.nearest_step(41.0)));
        assert!(s.contains(&cfg.nearest_step(115.0)));
        assert!(s.contains(&300));
        assert_eq!(s.len(), 12);
        let short = default_snapshot_steps(&cfg, 50);
        assert!(short.iter().all(|&x| x <= 50));
        assert_eq!(short.len(), 10);
    }

    #[test]
    fn budget_projection() {
        let clock = BudgetClock::new(Some(Duration::from_nanos(1)));
        std::thread::sleep(Duration::from_millis(1));
        assert!(matches!(clock.check(1, 10), Err(Error::BudgetExceeded { .. })));
        assert!(BudgetClock::new(None).check(1, 10).is_ok());
    }
}
