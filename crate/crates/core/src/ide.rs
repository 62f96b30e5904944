//! Explicit Euler solver for the scaled integro-differential equation
//! `∂t f = (r - ρ) f + μ (∫ M_ε(v|w) f(w) dw - f)`.

use crate::config::{check_le, check_lt, SimConfig, STEP_GUARD_LIMIT};
use crate::diagnostics::{clamp_negative, ClampReport};
use crate::error::Result;
use crate::grid::{DistributionState, PhenotypeGrid};
use crate::model::{KernelFamily, MutationKernel, NetProliferationRate};
use crate::run::{drive, GridRun, GridStepper};

/// Trapezium discretization of `w ↦ M_ε(v_k|w)` restricted to a window of
/// `8√β ε` around the shifted mean.
///
/// On a uniform grid the weights depend only on the node offset `k - j`, so a
/// single stencil serves every row; the trapezium end weights are applied to
/// the source values.
#[derive(Debug, Clone)]
pub struct KernelOperator {
    grid: PhenotypeGrid,
    /// Largest offset `k - j` in the window.
    last_offset: isize,
    /// Kernel values for offsets `last_offset, last_offset - 1, ...`.
    reversed: Vec<f64>,
}

impl KernelOperator {
    pub fn new<F: KernelFamily>(kernel: &MutationKernel<F>, grid: PhenotypeGrid) -> Self {
        let dv = grid.dv();
        let shift = kernel.shift();
        let window = kernel.window();
        let first = ((shift - window) / dv).ceil() as isize;
        let last = ((shift + window) / dv).floor() as isize;
        let reversed = (first..=last)
            .rev()
            .map(|d| kernel.eval(d as f64 * dv, 0.0))
            .collect();
        Self {
            grid,
            last_offset: last,
            reversed,
        }
    }

    pub fn grid(&self) -> &PhenotypeGrid {
        &self.grid
    }

    pub fn stencil_len(&self) -> usize {
        self.reversed.len()
    }

    /// `out[k] = Σ_j M(v_k|w_j) ω_j f_j` with `ω_j` the trapezium weights.
    ///
    /// `weighted` is scratch space of the grid's length.
    pub fn apply(&self, f: &[f64], weighted: &mut [f64], out: &mut [f64]) {
        let n = self.grid.len();
        for (j, (w, &x)) in weighted.iter_mut().zip(f).enumerate() {
            *w = self.grid.quadrature_weight(j) * x;
        }
        let len = self.reversed.len() as isize;
        for (k, o) in out.iter_mut().enumerate().take(n) {
            // source index j = k - last + i for stencil position i
            let j0 = k as isize - self.last_offset;
            let i_lo = (-j0).max(0);
            let i_hi = (n as isize - j0).min(len);
            if i_lo >= i_hi {
                *o = 0.0;
                continue;
            }
            let ws = &self.reversed[i_lo as usize..i_hi as usize];
            let src = &weighted[(j0 + i_lo) as usize..(j0 + i_hi) as usize];
            *o = ws.iter().zip(src).map(|(a, b)| a * b).sum();
        }
    }

    /// Discrete mass, mean displacement and displacement variance of column `j`:
    /// the trapezium moments of `v ↦ M(v|w_j)` on the grid.
    pub fn column_moments(&self, j: usize) -> (f64, f64, f64) {
        let n = self.grid.len();
        let w = self.grid.node(j);
        let len = self.reversed.len() as isize;
        let (mut m0, mut m1, mut m2) = (0.0, 0.0, 0.0);
        for i in 0..len {
            // offset d = k - j = last - i
            let k = j as isize + self.last_offset - i;
            if k < 0 || k >= n as isize {
                continue;
            }
            let q = self.grid.quadrature_weight(k as usize) * self.reversed[i as usize];
            let d = self.grid.node(k as usize) - w;
            m0 += q;
            m1 += q * d;
            m2 += q * d * d;
        }
        let mean = m1 / m0;
        (m0, mean, m2 / m0 - mean * mean)
    }

    /// Largest `|mass - 1|` over columns whose window lies strictly inside the grid.
    pub fn max_interior_mass_defect(&self) -> f64 {
        let n = self.grid.len() as isize;
        let first = self.last_offset - self.reversed.len() as isize + 1;
        let lo = (1 - first).max(0);
        let hi = (n - 2 - self.last_offset).min(n - 1);
        (lo..=hi)
            .map(|j| (self.column_moments(j as usize).0 - 1.0).abs())
            .fold(0.0, f64::max)
    }
}

/// Explicit Euler stepper for the integro-differential model.
#[derive(Debug, Clone)]
pub struct IdeSolver {
    rate: Vec<f64>,
    kernel: KernelOperator,
    mu: f64,
    dt: f64,
    weighted: Vec<f64>,
    gain: Vec<f64>,
}

impl IdeSolver {
    /// Fails if `Δt(‖r‖∞ + 1 + μ) ≥ 1` or `μΔt > 0.1`.
    pub fn new<F: KernelFamily>(
        rate: &NetProliferationRate,
        kernel: &MutationKernel<F>,
        grid: PhenotypeGrid,
        mu: f64,
        dt: f64,
    ) -> Result<Self> {
        let r_sup = rate.sup_abs_on(&grid);
        check_le("ide_mu_dt", mu * dt, STEP_GUARD_LIMIT)?;
        check_lt("ide_step", dt * (r_sup + 1.0 + mu), 1.0)?;
        Ok(Self {
            rate: rate.sample_on(&grid),
            kernel: KernelOperator::new(kernel, grid),
            mu,
            dt,
            weighted: vec![0.0; grid.len()],
            gain: vec![0.0; grid.len()],
        })
    }

    pub fn kernel(&self) -> &KernelOperator {
        &self.kernel
    }
}

impl GridStepper for IdeSolver {
    fn dt(&self) -> f64 {
        self.dt
    }

    fn step(&mut self, state: &mut DistributionState) -> ClampReport {
        let rho = state.density();
        self.kernel
            .apply(&state.values, &mut self.weighted, &mut self.gain);
        let (dt, mu) = (self.dt, self.mu);
        for ((f, &r), &g) in state.values.iter_mut().zip(&self.rate).zip(&self.gain) {
            *f += dt * ((r - rho) * *f + mu * (g - *f));
        }
        state.time += dt;
        clamp_negative(&mut state.values, state.grid.dv())
    }
}

/// One explicit Euler step of the integro-differential model.
pub fn ide_step<F: KernelFamily>(
    f: &DistributionState,
    rate: &NetProliferationRate,
    kernel: &MutationKernel<F>,
    mu: f64,
    dt: f64,
) -> Result<DistributionState> {
    let mut solver = IdeSolver::new(rate, kernel, f.grid, mu, dt)?;
    let mut next = f.clone();
    solver.step(&mut next);
    Ok(next)
}

/// Integrates the integro-differential model from the configured initial
/// datum to `t_final`.
pub fn ide_run(config: &SimConfig) -> Result<GridRun> {
    let grid = config.grid()?;
    let rate = config.rate();
    let mut solver = IdeSolver::new(&rate, &config.kernel(), grid, config.mu(), config.dt)?;
    let initial = config.initial.on_grid(grid);
    Ok(drive(
        config,
        &mut solver,
        initial,
        rate.sup_positive_on(&grid),
    ))
}
