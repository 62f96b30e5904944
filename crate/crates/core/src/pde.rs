//! Explicit finite-difference solver for the limit equation
//! `∂t g = (r - ϱ) g - α ∂v g + (β/2) ∂²v g` with homogeneous Dirichlet ends.

use crate::config::{check_lt, AdvectionScheme, SimConfig};
use crate::diagnostics::{clamp_negative, ClampReport};
use crate::error::Result;
use crate::grid::{DistributionState, PhenotypeGrid};
use crate::model::NetProliferationRate;
use crate::run::{drive, GridRun, GridStepper};

#[derive(Debug, Clone)]
pub struct PdeSolver {
    rate: Vec<f64>,
    alpha: f64,
    beta: f64,
    dt: f64,
    dv: f64,
    scheme: AdvectionScheme,
    next: Vec<f64>,
}

impl PdeSolver {
    /// Fails unless `Δt(β/Δv² + |α|/Δv + ‖r‖∞ + 1) < 1`.
    pub fn new(
        rate: &NetProliferationRate,
        grid: PhenotypeGrid,
        alpha: f64,
        beta: f64,
        dt: f64,
        scheme: AdvectionScheme,
    ) -> Result<Self> {
        let dv = grid.dv();
        let cfl = dt * (beta / (dv * dv) + alpha.abs() / dv + rate.sup_abs_on(&grid) + 1.0);
        check_lt("pde_cfl", cfl, 1.0)?;
        Ok(Self {
            rate: rate.sample_on(&grid),
            alpha,
            beta,
            dt,
            dv,
            scheme,
            next: vec![0.0; grid.len()],
        })
    }
}

impl GridStepper for PdeSolver {
    fn dt(&self) -> f64 {
        self.dt
    }

    fn step(&mut self, state: &mut DistributionState) -> ClampReport {
        let rho = state.density();
        let g = &state.values;
        let n = g.len();
        let (dv, dt, alpha) = (self.dv, self.dt, self.alpha);
        let diff = 0.5 * self.beta / (dv * dv);
        for k in 1..n - 1 {
            let advect = match self.scheme {
                AdvectionScheme::Upwind if alpha > 0.0 => (g[k] - g[k - 1]) / dv,
                AdvectionScheme::Upwind if alpha < 0.0 => (g[k + 1] - g[k]) / dv,
                AdvectionScheme::Upwind => 0.0,
                AdvectionScheme::Central => (g[k + 1] - g[k - 1]) / (2.0 * dv),
            };
            let lap = g[k + 1] - 2.0 * g[k] + g[k - 1];
            self.next[k] = g[k] + dt * ((self.rate[k] - rho) * g[k] - alpha * advect + diff * lap);
        }
        self.next[0] = 0.0;
        self.next[n - 1] = 0.0;
        std::mem::swap(&mut state.values, &mut self.next);
        state.time += dt;
        clamp_negative(&mut state.values, dv)
    }
}

/// One explicit step of the limit equation.
pub fn pde_step(
    g: &DistributionState,
    rate: &NetProliferationRate,
    alpha: f64,
    beta: f64,
    dt: f64,
    scheme: AdvectionScheme,
) -> Result<DistributionState> {
    let mut solver = PdeSolver::new(rate, g.grid, alpha, beta, dt, scheme)?;
    let mut next = g.clone();
    solver.step(&mut next);
    Ok(next)
}

/// Integrates the limit equation from the configured initial datum to `t_final`.
pub fn pde_run(config: &SimConfig) -> Result<GridRun> {
    let grid = config.grid()?;
    let rate = config.rate();
    let mut solver = PdeSolver::new(
        &rate,
        grid,
        config.alpha,
        config.beta,
        config.dt,
        config.scheme,
    )?;
    let initial = config.initial.on_grid(grid);
    Ok(drive(
        config,
        &mut solver,
        initial,
        rate.sup_positive_on(&grid),
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{initial_distribution, Mollifier};

    fn grid() -> PhenotypeGrid {
        PhenotypeGrid::with_spacing(-15.0, 15.0, 0.05).unwrap()
    }

    #[test]
    fn zero_is_a_fixed_point() {
        let rate = NetProliferationRate::parabolic(1.5, Mollifier::new(5.0, 0.5));
        let zero = DistributionState::zeros(grid());
        let next = pde_step(&zero, &rate, 0.3, 0.4, 1e-3, AdvectionScheme::Upwind).unwrap();
        assert!(next.values.iter().all(|&x| x == 0.0));
    }

    #[test]
    fn pure_reaction_scales_pointwise() {
        let rate = NetProliferationRate::constant(0.7, Mollifier::new(12.0, 0.5));
        let f0 = initial_distribution(grid());
        let dt = 1e-3;
        let next = pde_step(&f0, &rate, 0.0, 0.0, dt, AdvectionScheme::Upwind).unwrap();
        for k in 1..f0.values.len() - 1 {
            let factor = 1.0 + dt * (rate.eval(f0.grid.node(k)) - f0.density());
            assert!((next.values[k] - factor * f0.values[k]).abs() <= 1e-13 * f0.values[k]);
        }
    }

    #[test]
    fn upwind_direction_follows_drift() {
        let rate = NetProliferationRate::constant(0.0, Mollifier::new(12.0, 0.5));
        let g = PhenotypeGrid::new(-1.0, 1.0, 21).unwrap();
        let mut s = DistributionState::zeros(g);
        s.values[10] = 1.0;
        let right = pde_step(&s, &rate, 1.0, 0.0, 0.01, AdvectionScheme::Upwind).unwrap();
        assert!(right.values[11] > 0.0 && right.values[9] == 0.0);
        let left = pde_step(&s, &rate, -1.0, 0.0, 0.01, AdvectionScheme::Upwind).unwrap();
        assert!(left.values[9] > 0.0 && left.values[11] == 0.0);
    }

    #[test]
    fn cfl_violation_is_reported() {
        let rate = NetProliferationRate::parabolic(1.5, Mollifier::new(5.0, 0.5));
        let f0 = initial_distribution(grid());
        let err = pde_step(&f0, &rate, 0.3, 0.4, 1e-2, AdvectionScheme::Upwind).unwrap_err();
        assert!(err.to_string().contains("pde_cfl"));
    }

    #[test]
    fn zero_rate_density_decays_like_inverse_time() {
        // r ≡ 0 gives dϱ/dt = -ϱ², so ϱ(1) = 0.3 / 1.3
        let cfg = SimConfig {
            rate_profile: crate::model::RateProfile::Constant { value: 0.0 },
            t_final: 1.0,
            snapshot_times: vec![1.0],
            model: crate::config::ModelKind::Pde,
            ..SimConfig::desk()
        };
        let run = pde_run(&cfg).unwrap();
        let rho = *run.series.rho.last().unwrap();
        assert!((rho - 0.3 / 1.3).abs() < 2e-4, "{rho}");
        assert!(run.series.rho.windows(2).all(|w| w[1] <= w[0]));
    }
}
