//! Runtime checks of the properties every grid solution must keep:
//! non-negativity, density bounds, the L² growth estimate and far-field decay.

use crate::error::{Result, SimError};
use crate::grid::DistributionState;

/// Nodes next to each end of the domain inspected by the far-field check.
pub const BOUNDARY_NODES: usize = 10;

pub const EXCURSION_TOL: f64 = 1e-12;
pub const DENSITY_LOWER_TOL: f64 = 1e-9;
pub const DENSITY_UPPER_TOL: f64 = 1e-6;
pub const BOUNDARY_TOL: f64 = 1e-10;

/// Accumulated invariant statistics of one grid-solver run.
#[derive(Debug, Clone, PartialEq)]
pub struct Diagnostics {
    pub steps: usize,
    /// Largest pre-clamp negative value, relative to `max f` at that step.
    pub max_relative_excursion: f64,
    /// Sum over steps of the trapezium mass removed by clamping.
    pub clamped_mass: f64,
    pub density_min: f64,
    pub density_max: f64,
    /// Largest ratio `‖f(t)‖ / (‖f⁰‖ e^{t sup r⁺} (1 + 10Δt))`.
    pub l2_bound_ratio: f64,
    /// Largest `|f|` seen on the boundary nodes.
    pub boundary_max: f64,
}

impl Diagnostics {
    /// Every violated property, in a fixed order.
    pub fn violations(&self) -> Vec<SimError> {
        let mut found = Vec::new();
        if self.max_relative_excursion >= EXCURSION_TOL {
            found.push(SimError::Invariant {
                check: "non-negativity",
                detail: format!(
                    "pre-clamp negative excursion {:.3e} x max f exceeds {EXCURSION_TOL:e}",
                    self.max_relative_excursion
                ),
            });
        }
        if self.density_min < -DENSITY_LOWER_TOL || self.density_max > 1.0 + DENSITY_UPPER_TOL {
            found.push(SimError::Invariant {
                check: "density bounds",
                detail: format!(
                    "density range [{:.6e}, {:.6e}] leaves [0, 1]",
                    self.density_min, self.density_max
                ),
            });
        }
        if self.l2_bound_ratio > 1.0 {
            found.push(SimError::Invariant {
                check: "L2 estimate",
                detail: format!(
                    "L2 norm exceeds its exponential bound by factor {:.6}",
                    self.l2_bound_ratio
                ),
            });
        }
        if self.boundary_max >= BOUNDARY_TOL {
            found.push(SimError::Invariant {
                check: "far-field decay",
                detail: format!(
                    "boundary value {:.3e} exceeds {BOUNDARY_TOL:e}",
                    self.boundary_max
                ),
            });
        }
        found
    }

    /// Fails on the first violated property.
    pub fn verify(&self) -> Result<()> {
        match self.violations().into_iter().next() {
            Some(err) => Err(err),
            None => Ok(()),
        }
    }
}

/// Tracks [`Diagnostics`] along a run.
#[derive(Debug, Clone)]
pub struct InvariantMonitor {
    initial_l2: f64,
    growth: f64,
    dt: f64,
    diag: Diagnostics,
}

impl InvariantMonitor {
    pub fn new(initial: &DistributionState, growth: f64, dt: f64) -> Self {
        let rho = initial.density();
        let mut monitor = Self {
            initial_l2: initial.l2_norm(),
            growth,
            dt,
            diag: Diagnostics {
                steps: 0,
                max_relative_excursion: 0.0,
                clamped_mass: 0.0,
                density_min: rho,
                density_max: rho,
                l2_bound_ratio: 0.0,
                boundary_max: 0.0,
            },
        };
        monitor.observe_state(initial);
        monitor
    }

    /// Records one step: `clamp` is what the solver removed, `state` is post-clamp.
    pub fn record(&mut self, state: &DistributionState, clamp: ClampReport) {
        self.diag.steps += 1;
        if clamp.most_negative < 0.0 {
            let scale = state.max_value().max(f64::MIN_POSITIVE);
            self.diag.max_relative_excursion = self
                .diag
                .max_relative_excursion
                .max(-clamp.most_negative / scale);
        }
        self.diag.clamped_mass += clamp.removed_mass;
        self.observe_state(state);
    }

    fn observe_state(&mut self, state: &DistributionState) {
        let rho = state.density();
        self.diag.density_min = self.diag.density_min.min(rho);
        self.diag.density_max = self.diag.density_max.max(rho);
        let bound = self.initial_l2 * (self.growth * state.time).exp() * (1.0 + 10.0 * self.dt);
        let l2 = state.l2_norm();
        let ratio = if bound > 0.0 {
            l2 / bound
        } else if l2 > 0.0 {
            f64::INFINITY
        } else {
            0.0
        };
        self.diag.l2_bound_ratio = self.diag.l2_bound_ratio.max(ratio);
        let n = state.values.len();
        let k = BOUNDARY_NODES.min(n / 2);
        let edge = state.values[..k]
            .iter()
            .chain(&state.values[n - k..])
            .fold(0.0f64, |m, f| m.max(f.abs()));
        self.diag.boundary_max = self.diag.boundary_max.max(edge);
    }

    pub fn finish(self) -> Diagnostics {
        self.diag
    }
}

/// What a solver step removed while clamping negative roundoff.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct ClampReport {
    pub most_negative: f64,
    pub removed_mass: f64,
}

/// Clamps negative entries to zero and reports what was removed.
pub(crate) fn clamp_negative(values: &mut [f64], dv: f64) -> ClampReport {
    let mut report = ClampReport::default();
    for f in values.iter_mut() {
        if *f < 0.0 {
            report.most_negative = report.most_negative.min(*f);
            report.removed_mass -= *f * dv;
            *f = 0.0;
        }
    }
    report
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::PhenotypeGrid;

    #[test]
    fn clamp_reports_removed_mass() {
        let mut v = vec![1.0, -1e-3, 0.5, -2e-3];
        let r = clamp_negative(&mut v, 0.1);
        assert_eq!(v, vec![1.0, 0.0, 0.5, 0.0]);
        assert_eq!(r.most_negative, -2e-3);
        assert!((r.removed_mass - 3e-4).abs() < 1e-15);
    }

    #[test]
    fn boundary_mass_is_flagged() {
        let grid = PhenotypeGrid::new(-1.0, 1.0, 41).unwrap();
        let mut s = DistributionState::from_fn(grid, |v| (-v * v * 50.0).exp());
        let mut m = InvariantMonitor::new(&s, 1.0, 1e-3);
        s.values[0] = 1e-6;
        s.time = 1e-3;
        m.record(&s, ClampReport::default());
        let d = m.finish();
        assert!(matches!(
            d.verify(),
            Err(SimError::Invariant {
                check: "far-field decay",
                ..
            })
        ));
    }
}
