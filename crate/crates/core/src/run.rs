//! Time loop shared by the two grid solvers.

use crate::analysis::{moments, MomentSeries};
use crate::config::SimConfig;
use crate::diagnostics::{ClampReport, Diagnostics, InvariantMonitor};
use crate::grid::DistributionState;

/// One explicit time step of a grid solver.
pub trait GridStepper {
    fn dt(&self) -> f64;
    fn step(&mut self, state: &mut DistributionState) -> ClampReport;
}

/// Output of a grid-solver run.
#[derive(Debug, Clone)]
pub struct GridRun {
    pub series: MomentSeries,
    /// State at every moment record, aligned with `series.times`.
    pub trajectory: Vec<DistributionState>,
    /// States at the configured snapshot times.
    pub snapshots: Vec<DistributionState>,
    pub final_state: DistributionState,
    pub diagnostics: Diagnostics,
}

pub(crate) fn drive<S: GridStepper>(
    config: &SimConfig,
    stepper: &mut S,
    mut state: DistributionState,
    growth: f64,
) -> GridRun {
    let n_steps = config.n_steps();
    let stride = config.moment_stride_steps();
    let snap_steps = config.snapshot_steps();
    let dt = stepper.dt();

    let mut monitor = InvariantMonitor::new(&state, growth, dt);
    let mut series = MomentSeries::default();
    let mut trajectory = Vec::new();
    let mut snapshots = Vec::new();

    let mut record = |step: usize, state: &DistributionState| {
        if step.is_multiple_of(stride) || step == n_steps {
            series.push(state.time, moments(state));
            trajectory.push(state.clone());
        }
        for _ in snap_steps.iter().filter(|&&s| s == step) {
            snapshots.push(state.clone());
        }
    };

    record(0, &state);
    for step in 1..=n_steps {
        let clamp = stepper.step(&mut state);
        state.time = step as f64 * dt;
        monitor.record(&state, clamp);
        record(step, &state);
    }

    GridRun {
        series,
        trajectory,
        snapshots,
        final_state: state,
        diagnostics: monitor.finish(),
    }
}
