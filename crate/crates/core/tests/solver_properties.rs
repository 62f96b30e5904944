use proptest::prelude::*;

use phenokin::{
    ide_step, moments, pde_step, AdvectionScheme, DistributionState, ModelKind, Mollifier,
    MutationKernel, NetProliferationRate, PhenotypeGrid, SimConfig,
};

fn grid() -> PhenotypeGrid {
    PhenotypeGrid::with_spacing(-15.0, 15.0, 0.05).unwrap()
}

fn bump(mass: f64, centre: f64, width: f64) -> DistributionState {
    let norm = mass / (width * (2.0 * std::f64::consts::PI).sqrt());
    DistributionState::from_fn(grid(), |v| {
        norm * (-(v - centre).powi(2) / (2.0 * width * width)).exp()
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn ide_step_keeps_density_in_unit_interval(
        mass in 0.0f64..1.0,
        centre in -3.0f64..3.0,
        width in 0.3f64..2.0,
        alpha in -0.5f64..0.5,
        eps in 0.1f64..1.0,
    ) {
        let rate = NetProliferationRate::parabolic(1.5, Mollifier::new(5.0, 0.5));
        let kernel = MutationKernel::gaussian(alpha, 0.4, eps);
        let dt = 1e-3;
        let f = bump(mass, centre, width);
        let next = ide_step(&f, &rate, &kernel, 1.0 / (eps * eps), dt).unwrap();
        prop_assert!(next.values.iter().all(|&x| x >= 0.0));
        let rho = next.density();
        prop_assert!((0.0..=1.0 + 1e-6).contains(&rho));
    }

    #[test]
    fn pde_step_is_positive_and_matches_density_equation(
        mass in 0.0f64..1.0,
        centre in -3.0f64..3.0,
        width in 0.3f64..1.2,
        alpha in -0.5f64..0.5,
        central in any::<bool>(),
    ) {
        let rate = NetProliferationRate::parabolic(1.5, Mollifier::new(5.0, 0.5));
        let scheme = if central { AdvectionScheme::Central } else { AdvectionScheme::Upwind };
        let dt = 1e-3;
        let g = bump(mass, centre, width);
        let next = pde_step(&g, &rate, alpha, 0.4, dt, scheme).unwrap();
        prop_assert!(next.values.iter().all(|&x| x >= 0.0));
        // with compact numerical support, transport terms conserve the trapezium sum
        let before = moments(&g);
        let reaction: f64 = g.grid.trapezium_weighted(&g.values, |v| rate.eval(v));
        let predicted = before.rho + dt * (reaction - before.rho * before.rho);
        prop_assert!((next.density() - predicted).abs() <= 1e-12);
    }

    #[test]
    fn ide_step_conserves_mass_without_selection(
        mass in 0.01f64..1.0,
        centre in -3.0f64..3.0,
        alpha in -0.5f64..0.5,
        eps in 0.1f64..1.0,
    ) {
        // r ≡ 0 on the whole support: dρ/dt = -ρ², kernel mass is 1 in the interior
        let rate = NetProliferationRate::constant(0.0, Mollifier::new(12.0, 0.5));
        let kernel = MutationKernel::gaussian(alpha, 0.4, eps);
        let dt = 1e-3;
        let f = bump(mass, centre, 0.7);
        let next = ide_step(&f, &rate, &kernel, 1.0 / (eps * eps), dt).unwrap();
        let rho = f.density();
        prop_assert!((next.density() - (rho - dt * rho * rho)).abs() <= 1e-12);
    }
}

#[test]
fn desk_configuration_guards_hold_for_reference_parameters() {
    for alpha in [-0.3, 0.0, 0.3] {
        for eps in [1.0, 10f64.powf(-0.5), 0.1] {
            for model in [ModelKind::Abm, ModelKind::Ide, ModelKind::Pde] {
                let cfg = SimConfig {
                    model,
                    alpha,
                    epsilon: eps,
                    ..SimConfig::desk()
                };
                cfg.validate().unwrap();
            }
        }
    }
}
