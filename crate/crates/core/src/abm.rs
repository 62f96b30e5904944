//! Direct Monte Carlo simulation of the agent-based model.
//!
//! `N` agents each carry a compartment (reservoir or living) and a phenotype.
//! Over a step of length `Δt` every agent draws independent switching events
//! with probabilities `xΔt / (1 + xΔt)`:
//!
//! * a reservoir agent interacts with a partner picked uniformly among the
//!   other agents (rate `p0`); if the partner is living, the focal agent
//!   becomes living with the partner's phenotype (proliferation);
//! * a living agent returns to the reservoir with phenotype `v0` at rate
//!   `d(v) = 1 - r(v)` (death);
//! * a living agent that does not die resamples its phenotype from
//!   `M_ε(·|v)` at rate `μ` (phenotype change).
//!
//! All agents read the same pre-step snapshot and updates are committed
//! together.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::analysis::{MomentSeries, Moments};
use crate::config::{check_le, SimConfig, STEP_GUARD_LIMIT};
use crate::error::{Result, SimError};
use crate::grid::{DistributionState, PhenotypeGrid};
use crate::model::{InitialDatum, KernelFamily, MutationKernel, NetProliferationRate};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u8)]
pub enum Compartment {
    Reservoir = 0,
    Living = 1,
}

/// Probability that an event of rate `rate` fires within `dt`.
#[inline]
pub fn switching_probability(rate: f64, dt: f64) -> f64 {
    let x = rate * dt;
    x / (1.0 + x)
}

/// Event rates of one step; construction enforces the step guard.
#[derive(Debug, Clone, Copy)]
pub struct AbmStepRates {
    pub p0: f64,
    pub mu: f64,
    pub rate: NetProliferationRate,
    dt: f64,
}

impl AbmStepRates {
    /// Fails unless `max(p0, max_v d(v), μ)·Δt ≤ 0.1` over the grid nodes.
    pub fn new(
        rate: NetProliferationRate,
        p0: f64,
        mu: f64,
        dt: f64,
        grid: &PhenotypeGrid,
    ) -> Result<Self> {
        if rate.sup_positive_on(grid) > 1.0 {
            return Err(SimError::config("rate", "net proliferation rate exceeds 1"));
        }
        let fastest = p0.max(rate.sup_death_on(grid)).max(mu);
        check_le("abm_step", fastest * dt, STEP_GUARD_LIMIT)?;
        Ok(Self { p0, mu, rate, dt })
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }
}

#[derive(Debug, Clone)]
pub struct AgentPopulation {
    compartments: Vec<Compartment>,
    phenotypes: Vec<f64>,
    v0: f64,
    time: f64,
    rng: ChaCha8Rng,
    prev_compartments: Vec<Compartment>,
    prev_phenotypes: Vec<f64>,
}

impl AgentPopulation {
    /// Places `round(ρ⁰N)` agents in the living compartment with phenotypes
    /// drawn from `f⁰/ρ⁰`; the rest sit in the reservoir at `v0`.
    pub fn new(n_agents: usize, datum: &InitialDatum, v0: f64, seed: u64) -> Result<Self> {
        if datum.mass > 1.0 || datum.mass < 0.0 {
            return Err(SimError::config(
                "initial",
                format!("initial mass {} must lie in [0, 1]", datum.mass),
            ));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let living = (datum.mass * n_agents as f64).round() as usize;
        let mut compartments = vec![Compartment::Reservoir; n_agents];
        let mut phenotypes = vec![v0; n_agents];
        for i in 0..living {
            compartments[i] = Compartment::Living;
            phenotypes[i] = datum.sample(&mut rng);
        }
        Ok(Self {
            prev_compartments: compartments.clone(),
            prev_phenotypes: phenotypes.clone(),
            compartments,
            phenotypes,
            v0,
            time: 0.0,
            rng,
        })
    }

    /// Builds a population from explicit agent states.
    pub fn from_agents(agents: &[(Compartment, f64)], v0: f64, seed: u64) -> Self {
        let compartments: Vec<_> = agents.iter().map(|a| a.0).collect();
        let phenotypes: Vec<_> = agents
            .iter()
            .map(|&(c, v)| if c == Compartment::Reservoir { v0 } else { v })
            .collect();
        Self {
            prev_compartments: compartments.clone(),
            prev_phenotypes: phenotypes.clone(),
            compartments,
            phenotypes,
            v0,
            time: 0.0,
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    pub fn len(&self) -> usize {
        self.compartments.len()
    }

    pub fn is_empty(&self) -> bool {
        self.compartments.is_empty()
    }

    pub fn time(&self) -> f64 {
        self.time
    }

    pub fn compartments(&self) -> &[Compartment] {
        &self.compartments
    }

    pub fn phenotypes(&self) -> &[f64] {
        &self.phenotypes
    }

    pub fn living_count(&self) -> usize {
        self.compartments
            .iter()
            .filter(|&&c| c == Compartment::Living)
            .count()
    }

    /// Every reservoir agent carries `v0`.
    pub fn reservoir_is_pure(&self) -> bool {
        self.compartments
            .iter()
            .zip(&self.phenotypes)
            .all(|(&c, &v)| c == Compartment::Living || v == self.v0)
    }

    fn living_phenotypes(&self) -> impl Iterator<Item = f64> + '_ {
        self.compartments
            .iter()
            .zip(&self.phenotypes)
            .filter(|(&c, _)| c == Compartment::Living)
            .map(|(_, &v)| v)
    }

    /// `(N₁/N, Σv/N, Σv²/N)` over living agents.
    pub fn moments(&self) -> Moments {
        let n = self.len() as f64;
        let (mut count, mut p, mut e) = (0usize, 0.0, 0.0);
        for v in self.living_phenotypes() {
            count += 1;
            p += v;
            e += v * v;
        }
        Moments::from_raw(count as f64 / n, p / n, e / n)
    }

    /// Histogram estimate of the living distribution: counts per cell / (N Δv).
    pub fn histogram(&self, grid: PhenotypeGrid) -> DistributionState {
        let mut state = DistributionState::zeros(grid);
        let scale = 1.0 / (self.len() as f64 * grid.dv());
        for v in self.living_phenotypes() {
            if let Some(k) = grid.cell_of(v) {
                state.values[k] += scale;
            }
        }
        state.time = self.time;
        state
    }

    /// Advances every agent by one step from the current snapshot.
    pub fn step<F: KernelFamily>(&mut self, rates: &AbmStepRates, kernel: &MutationKernel<F>) {
        let dt = rates.dt;
        let n = self.len();
        self.prev_compartments.copy_from_slice(&self.compartments);
        self.prev_phenotypes.copy_from_slice(&self.phenotypes);
        let q_interact = switching_probability(rates.p0, dt);
        let q_mutate = switching_probability(rates.mu, dt);

        for i in 0..n {
            match self.prev_compartments[i] {
                Compartment::Reservoir => {
                    if n < 2 {
                        continue;
                    }
                    let u: f64 = self.rng.random();
                    if u < q_interact {
                        let mut j = self.rng.random_range(0..n - 1);
                        if j >= i {
                            j += 1;
                        }
                        if self.prev_compartments[j] == Compartment::Living {
                            self.compartments[i] = Compartment::Living;
                            self.phenotypes[i] = self.prev_phenotypes[j];
                        }
                    }
                }
                Compartment::Living => {
                    let v = self.prev_phenotypes[i];
                    let q_death = switching_probability(rates.rate.death(v), dt);
                    let u: f64 = self.rng.random();
                    if u < q_death {
                        self.compartments[i] = Compartment::Reservoir;
                        self.phenotypes[i] = self.v0;
                    } else if u < q_death + (1.0 - q_death) * q_mutate {
                        self.phenotypes[i] = kernel.sample(v, &mut self.rng);
                    }
                }
            }
        }
        self.time += dt;
    }
}

/// Initial population for a configuration.
pub fn abm_init(config: &SimConfig, datum: &InitialDatum) -> Result<AgentPopulation> {
    AgentPopulation::new(config.n_agents, datum, config.v0, config.seed)
}

#[derive(Debug, Clone)]
pub struct AbmRun {
    pub series: MomentSeries,
    /// Histogram estimates at the configured snapshot times.
    pub histograms: Vec<DistributionState>,
    pub population: AgentPopulation,
}

/// Simulates the agent-based model from `t = 0` to `t_final`.
pub fn abm_run(config: &SimConfig) -> Result<AbmRun> {
    let grid = config.grid()?;
    let rates = AbmStepRates::new(config.rate(), config.p0, config.mu(), config.dt, &grid)?;
    let kernel = config.kernel();
    let mut pop = abm_init(config, &config.initial)?;

    let n_steps = config.n_steps();
    let stride = config.moment_stride_steps();
    let snap_steps = config.snapshot_steps();
    let mut series = MomentSeries::default();
    let mut histograms = Vec::new();

    for step in 0..=n_steps {
        if step > 0 {
            pop.step(&rates, &kernel);
            pop.time = step as f64 * config.dt;
        }
        if step % stride == 0 || step == n_steps {
            series.push(pop.time, pop.moments());
        }
        for _ in snap_steps.iter().filter(|&&s| s == step) {
            histograms.push(pop.histogram(grid));
        }
    }
    Ok(AbmRun {
        series,
        histograms,
        population: pop,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::Mollifier;

    fn grid() -> PhenotypeGrid {
        PhenotypeGrid::with_spacing(-15.0, 15.0, 0.05).unwrap()
    }

    #[test]
    fn reference_initial_population() {
        let pop = AgentPopulation::new(100_000, &InitialDatum::REFERENCE, 0.0, 1).unwrap();
        assert_eq!(pop.living_count(), 30_000);
        let living: Vec<f64> = pop.living_phenotypes().collect();
        let m = living.iter().sum::<f64>() / living.len() as f64;
        let var = living.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (living.len() - 1) as f64;
        assert!((var - 0.5).abs() < 0.007, "{var}");
        assert!(pop.reservoir_is_pure());
    }

    #[test]
    fn empty_datum_fills_reservoir() {
        let pop = AgentPopulation::new(10, &InitialDatum::empty(), 0.0, 1).unwrap();
        assert_eq!(pop.living_count(), 0);
    }

    #[test]
    fn excessive_mass_is_rejected() {
        let datum = InitialDatum {
            mass: 1.5,
            ..InitialDatum::REFERENCE
        };
        assert!(AgentPopulation::new(10, &datum, 0.0, 1).is_err());
    }

    #[test]
    fn empty_population_is_absorbing() {
        let rate = NetProliferationRate::parabolic(1.5, Mollifier::new(5.0, 0.5));
        let rates = AbmStepRates::new(rate, 1.0, 1.0, 1e-3, &grid()).unwrap();
        let kernel = MutationKernel::gaussian(0.0, 0.4, 1.0);
        let mut pop = AgentPopulation::new(200, &InitialDatum::empty(), 0.0, 3).unwrap();
        for _ in 0..500 {
            pop.step(&rates, &kernel);
        }
        assert_eq!(pop.living_count(), 0);
        assert!(pop.reservoir_is_pure());
    }

    #[test]
    fn death_probability_at_steep_flank() {
        let rate = NetProliferationRate::parabolic(1.5, Mollifier::new(5.0, 0.5));
        let d = rate.death(-5.0);
        assert!((d - 42.25).abs() < 1e-12);
        let q = switching_probability(d, 1e-4);
        assert!((q - 4.2073e-3).abs() < 1e-7, "{q}");
    }

    #[test]
    fn expected_one_step_growth() {
        // d ≡ 0 on the plateau, μ = 0: E[ΔN₁] = N₀ (dt/(1+dt)) N₁/(N-1)
        let n = 10_000;
        let n1 = 3_000;
        let dt = 1e-3;
        let rate = NetProliferationRate::constant(1.0, Mollifier::new(12.0, 0.5));
        let rates = AbmStepRates::new(rate, 1.0, 0.0, dt, &grid()).unwrap();
        let kernel = MutationKernel::gaussian(0.0, 0.4, 1.0);
        let agents: Vec<_> = (0..n)
            .map(|i| {
                if i < n1 {
                    (Compartment::Living, 0.1 * (i % 7) as f64)
                } else {
                    (Compartment::Reservoir, 0.0)
                }
            })
            .collect();
        let trials = 2_000;
        let mut total = 0usize;
        for seed in 0..trials {
            let mut pop = AgentPopulation::from_agents(&agents, 0.0, seed);
            pop.step(&rates, &kernel);
            total += pop.living_count() - n1;
        }
        let expect = (n - n1) as f64 * switching_probability(1.0, dt) * n1 as f64 / (n - 1) as f64;
        let mean = total as f64 / trials as f64;
        let se = (expect / trials as f64).sqrt();
        assert!((mean - expect).abs() < 4.0 * se, "{mean} vs {expect}");
    }

    #[test]
    fn step_guard_is_enforced() {
        let rate = NetProliferationRate::parabolic(1.5, Mollifier::new(5.0, 0.5));
        assert!(AbmStepRates::new(rate, 1.0, 100.0, 1e-3, &grid()).is_ok());
        let err = AbmStepRates::new(rate, 1.0, 100.0, 2e-3, &grid()).unwrap_err();
        assert!(err.to_string().contains("abm_step"));
    }

    #[test]
    fn zero_final_time_returns_initial_moments() {
        let cfg = SimConfig {
            t_final: 1e-3,
            snapshot_times: vec![0.0],
            model: crate::config::ModelKind::Abm,
            n_agents: 20_000,
            ..SimConfig::desk()
        };
        let run = abm_run(&cfg).unwrap();
        let first = &run.series;
        assert!((first.rho[0] - 0.3).abs() < 1e-12);
        // p: sd of Σv/N is sqrt(6000·0.5)/N
        assert!(first.p[0].abs() < 4.0 * (6000.0f64 * 0.5).sqrt() / 20_000.0);
        assert!((first.energy[0] - 0.15).abs() < 0.01);
        let hist = &run.histograms[0];
        assert!((hist.grid.trapezium(&hist.values) - 0.3).abs() < 1e-3);
    }
}
