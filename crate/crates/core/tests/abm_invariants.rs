use proptest::prelude::*;

use phenokin::abm::{AbmStepRates, AgentPopulation, Compartment};
use phenokin::{
    abm_run, InitialDatum, ModelKind, Mollifier, MutationKernel, NetProliferationRate,
    PhenotypeGrid, SimConfig,
};

fn grid() -> PhenotypeGrid {
    PhenotypeGrid::with_spacing(-15.0, 15.0, 0.05).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn count_and_reservoir_are_preserved(
        n in 2usize..300,
        mass in 0.0f64..1.0,
        alpha in -0.5f64..0.5,
        eps in 0.2f64..1.5,
        v0 in -2.0f64..2.0,
        seed in any::<u64>(),
    ) {
        let datum = InitialDatum { mass, ..InitialDatum::REFERENCE };
        let rate = NetProliferationRate::parabolic(1.5, Mollifier::new(5.0, 0.5));
        let rates = AbmStepRates::new(rate, 1.0, 1.0 / (eps * eps), 1e-3, &grid()).unwrap();
        let kernel = MutationKernel::gaussian(alpha, 0.4, eps);
        let mut pop = AgentPopulation::new(n, &datum, v0, seed).unwrap();
        prop_assert_eq!(pop.living_count(), (mass * n as f64).round() as usize);
        for _ in 0..200 {
            pop.step(&rates, &kernel);
            prop_assert_eq!(pop.len(), n);
            prop_assert!(pop.reservoir_is_pure());
            let m = pop.moments();
            prop_assert!((0.0..=1.0).contains(&m.rho));
            prop_assert!(m.energy >= 0.0);
        }
    }

    #[test]
    fn lone_reservoir_agent_never_proliferates(seed in any::<u64>()) {
        let rate = NetProliferationRate::constant(1.0, Mollifier::new(12.0, 0.5));
        let rates = AbmStepRates::new(rate, 1.0, 1.0, 1e-2, &grid()).unwrap();
        let kernel = MutationKernel::gaussian(0.0, 0.4, 1.0);
        let mut pop = AgentPopulation::from_agents(&[(Compartment::Reservoir, 0.0)], 0.0, seed);
        for _ in 0..100 {
            pop.step(&rates, &kernel);
        }
        prop_assert_eq!(pop.living_count(), 0);
    }
}

#[test]
fn identical_seeds_give_identical_series() {
    let cfg = SimConfig {
        model: ModelKind::Abm,
        t_final: 0.5,
        n_agents: 3_000,
        alpha: 0.3,
        epsilon: 0.5,
        ..SimConfig::desk()
    };
    let a = abm_run(&cfg).unwrap();
    let b = abm_run(&cfg).unwrap();
    assert_eq!(a.series, b.series);
    assert_eq!(a.population.phenotypes(), b.population.phenotypes());
    let c = abm_run(&SimConfig {
        seed: cfg.seed + 1,
        ..cfg.clone()
    })
    .unwrap();
    assert_ne!(a.series, c.series);
}

#[test]
fn histogram_mass_matches_living_fraction() {
    let cfg = SimConfig {
        model: ModelKind::Abm,
        t_final: 1.0,
        snapshot_times: vec![0.5, 1.0],
        ..SimConfig::desk()
    };
    let run = abm_run(&cfg).unwrap();
    assert_eq!(run.histograms.len(), 2);
    for h in &run.histograms {
        let i = run.series.index_at(h.time).unwrap();
        let cell_sum: f64 = h.values.iter().sum::<f64>() * h.grid.dv();
        assert!((cell_sum - run.series.rho[i]).abs() < 1e-12);
    }
}

#[test]
fn death_only_population_decays_at_the_discrete_rate() {
    // r ≡ 0 and p0 = 0: N₁ shrinks by 1/(1 + dt) per step in expectation
    let dt = 1e-3;
    let rate = NetProliferationRate::constant(0.0, Mollifier::new(12.0, 0.5));
    let rates = AbmStepRates::new(rate, 0.0, 1.0, dt, &grid()).unwrap();
    let kernel = MutationKernel::gaussian(0.0, 0.4, 1.0);
    let n = 20_000;
    let mut pop = AgentPopulation::new(
        n,
        &InitialDatum {
            mass: 1.0,
            ..InitialDatum::REFERENCE
        },
        0.0,
        9,
    )
    .unwrap();
    let steps = 500;
    for _ in 0..steps {
        pop.step(&rates, &kernel);
    }
    let expect = n as f64 * (1.0 / (1.0 + dt)).powi(steps);
    let sd = (n as f64 * 0.4 * 0.6).sqrt();
    assert!((pop.living_count() as f64 - expect).abs() < 4.0 * sd);
}
