//! Shared model functions: the smooth cutoff, the net proliferation rate,
//! the scaled mutation kernel and the initial datum.

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::grid::{DistributionState, PhenotypeGrid};

/// Smooth transition profile on `[-1, 1]`, rising from 0 to 1.
///
/// `ζ(x) = ½[1 + tanh(2x / (1 - x²))]` on the open interval, extended by its
/// one-sided limits at the endpoints.
fn smooth_step(x: f64) -> f64 {
    if x <= -1.0 {
        0.0
    } else if x >= 1.0 {
        1.0
    } else {
        0.5 * (1.0 + (2.0 * x / (1.0 - x * x)).tanh())
    }
}

/// C∞ cutoff equal to 1 on `[-R, R]` and 0 outside `(-R-δ, R+δ)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Mollifier {
    pub radius: f64,
    pub layer: f64,
}

impl Mollifier {
    pub fn new(radius: f64, layer: f64) -> Self {
        debug_assert!(radius > 0.0 && layer > 0.0);
        Self { radius, layer }
    }

    pub fn eval(&self, v: f64) -> f64 {
        let a = v.abs();
        if a <= self.radius {
            1.0
        } else if a < self.radius + self.layer {
            1.0 - smooth_step(2.0 * (a - self.radius) / self.layer - 1.0)
        } else {
            0.0
        }
    }

    /// Outer edge of the support.
    pub fn support(&self) -> f64 {
        self.radius + self.layer
    }
}

/// Shape of the net proliferation rate before the cutoff is applied.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum RateProfile {
    /// `1 - (v - v_m)²`, maximal at the fittest trait `v_m`.
    Parabolic { fittest: f64 },
    /// Constant rate `r0` on the plateau of the cutoff.
    Constant { value: f64 },
}

/// Net proliferation rate `r(v) = profile(v) ψ(v)`; the death rate is `1 - r`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NetProliferationRate {
    pub profile: RateProfile,
    pub mollifier: Mollifier,
}

impl NetProliferationRate {
    pub fn parabolic(fittest: f64, mollifier: Mollifier) -> Self {
        Self {
            profile: RateProfile::Parabolic { fittest },
            mollifier,
        }
    }

    pub fn constant(value: f64, mollifier: Mollifier) -> Self {
        Self {
            profile: RateProfile::Constant { value },
            mollifier,
        }
    }

    #[inline]
    pub fn eval(&self, v: f64) -> f64 {
        let psi = self.mollifier.eval(v);
        if psi == 0.0 {
            return 0.0;
        }
        let shape = match self.profile {
            RateProfile::Parabolic { fittest } => 1.0 - (v - fittest) * (v - fittest),
            RateProfile::Constant { value } => value,
        };
        shape * psi
    }

    #[inline]
    pub fn death(&self, v: f64) -> f64 {
        1.0 - self.eval(v)
    }

    pub fn sample_on(&self, grid: &PhenotypeGrid) -> Vec<f64> {
        grid.nodes().map(|v| self.eval(v)).collect()
    }

    /// `max |r|` over the grid nodes.
    pub fn sup_abs_on(&self, grid: &PhenotypeGrid) -> f64 {
        grid.nodes().map(|v| self.eval(v).abs()).fold(0.0, f64::max)
    }

    /// `max r⁺` over the grid nodes; the growth exponent of the L² estimates.
    pub fn sup_positive_on(&self, grid: &PhenotypeGrid) -> f64 {
        grid.nodes().map(|v| self.eval(v)).fold(0.0, f64::max)
    }

    pub fn sup_death_on(&self, grid: &PhenotypeGrid) -> f64 {
        grid.nodes().map(|v| self.death(v)).fold(0.0, f64::max)
    }
}

/// A two-parameter base law `𝓜(z; ξ, ς²)` with unit mass, mean `ξ`,
/// variance `ς²` and a finite third absolute moment.
///
/// Implementations must report the moments they actually have so that the
/// kernel identity checks can run against them.
pub trait KernelFamily: Clone + Send + Sync {
    fn density(&self, z: f64, mean: f64, variance: f64) -> f64;
    fn sample<R: Rng + ?Sized>(&self, rng: &mut R, mean: f64, variance: f64) -> f64;
    fn third_abs_moment(&self, mean: f64, variance: f64) -> f64;
    /// Half-width (in `z` units, around the mean) beyond which the density is dropped.
    fn truncation_radius(&self, variance: f64) -> f64;
}

/// Normal base law.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Gaussian;

/// Number of standard deviations kept when truncating kernel windows.
pub const KERNEL_WINDOW_SIGMAS: f64 = 8.0;

impl KernelFamily for Gaussian {
    #[inline]
    fn density(&self, z: f64, mean: f64, variance: f64) -> f64 {
        let d = z - mean;
        (-d * d / (2.0 * variance)).exp() / (2.0 * std::f64::consts::PI * variance).sqrt()
    }

    #[inline]
    fn sample<R: Rng + ?Sized>(&self, rng: &mut R, mean: f64, variance: f64) -> f64 {
        let z: f64 = StandardNormal.sample(rng);
        mean + variance.sqrt() * z
    }

    fn third_abs_moment(&self, mean: f64, variance: f64) -> f64 {
        // E|X|³ for X ~ N(m, s²): s³ √(2/π) (2 + m²/s²) e^{-m²/2s²} + m (m² + 3s²) erf(m/(√2 s))
        let s = variance.sqrt();
        let m = mean;
        let q = m / s;
        s * s * s * (2.0 / std::f64::consts::PI).sqrt() * (2.0 + q * q) * (-0.5 * q * q).exp()
            + m.abs() * (m * m + 3.0 * variance) * erf(q.abs() / std::f64::consts::SQRT_2)
    }

    fn truncation_radius(&self, variance: f64) -> f64 {
        KERNEL_WINDOW_SIGMAS * variance.sqrt()
    }
}

// Abramowitz & Stegun 7.1.26; only used for the third-moment report.
fn erf(x: f64) -> f64 {
    let t = 1.0 / (1.0 + 0.327_591_1 * x.abs());
    let y = 1.0
        - (((((1.061_405_429 * t - 1.453_152_027) * t) + 1.421_413_741) * t - 0.284_496_736) * t
            + 0.254_829_592)
            * t
            * (-x * x).exp();
    y.copysign(x)
}

/// Quasi-invariant mutation kernel `M_ε(v|w) = ε⁻¹ 𝓜((v-w)/ε; αε, β)`.
///
/// Its `v`-marginal has mean `w + αε²` and variance `βε²`.
#[derive(Debug, Clone, PartialEq)]
pub struct MutationKernel<F: KernelFamily = Gaussian> {
    pub alpha: f64,
    pub beta: f64,
    pub epsilon: f64,
    pub family: F,
}

impl MutationKernel<Gaussian> {
    pub fn gaussian(alpha: f64, beta: f64, epsilon: f64) -> Self {
        Self::new(alpha, beta, epsilon, Gaussian)
    }
}

impl<F: KernelFamily> MutationKernel<F> {
    pub fn new(alpha: f64, beta: f64, epsilon: f64, family: F) -> Self {
        debug_assert!(beta > 0.0 && epsilon > 0.0);
        Self {
            alpha,
            beta,
            epsilon,
            family,
        }
    }

    /// Mean displacement `αε²`.
    pub fn shift(&self) -> f64 {
        self.alpha * self.epsilon * self.epsilon
    }

    /// Displacement variance `βε²`.
    pub fn variance(&self) -> f64 {
        self.beta * self.epsilon * self.epsilon
    }

    /// Mutation rate `μ = 1/ε²` of the quasi-invariant scaling.
    pub fn rate(&self) -> f64 {
        1.0 / (self.epsilon * self.epsilon)
    }

    /// Half-width of the displacement window kept by the discrete operator.
    pub fn window(&self) -> f64 {
        self.epsilon * self.family.truncation_radius(self.beta)
    }

    #[inline]
    pub fn eval(&self, v: f64, w: f64) -> f64 {
        let z = (v - w) / self.epsilon;
        self.family.density(z, self.alpha * self.epsilon, self.beta) / self.epsilon
    }

    pub fn sample<R: Rng + ?Sized>(&self, w: f64, rng: &mut R) -> f64 {
        w + self.epsilon
            * self
                .family
                .sample(rng, self.alpha * self.epsilon, self.beta)
    }
}

/// Normal initial datum with prescribed mass, mean and variance.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InitialDatum {
    pub mass: f64,
    pub mean: f64,
    pub variance: f64,
}

impl InitialDatum {
    /// `f⁰(v) = 3/(10√π) e^{-v²}`: mass 0.3, mean 0, variance 0.5.
    pub const REFERENCE: InitialDatum = InitialDatum {
        mass: 0.3,
        mean: 0.0,
        variance: 0.5,
    };

    pub fn empty() -> Self {
        Self {
            mass: 0.0,
            mean: 0.0,
            variance: 1.0,
        }
    }

    pub fn eval(&self, v: f64) -> f64 {
        if self.mass == 0.0 {
            return 0.0;
        }
        self.mass * Gaussian.density(v, self.mean, self.variance)
    }

    /// Draws a phenotype from `f⁰ / ρ⁰`.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        Gaussian.sample(rng, self.mean, self.variance)
    }

    pub fn on_grid(&self, grid: PhenotypeGrid) -> DistributionState {
        DistributionState::from_fn(grid, |v| self.eval(v))
    }
}

/// Grid sampling of the reference initial datum.
pub fn initial_distribution(grid: PhenotypeGrid) -> DistributionState {
    InitialDatum::REFERENCE.on_grid(grid)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn table_mollifier() -> Mollifier {
        Mollifier::new(5.0, 0.5)
    }

    #[test]
    fn mollifier_reference_values() {
        let psi = table_mollifier();
        assert_eq!(psi.eval(0.0), 1.0);
        assert_eq!(psi.eval(5.0), 1.0);
        assert_eq!(psi.eval(6.0), 0.0);
        assert_eq!(psi.eval(-5.5), 0.0);
        assert!((psi.eval(5.25) - 0.5).abs() < 1e-15);
        assert!((psi.eval(-5.25) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn mollifier_is_continuous_at_layer_edges() {
        let psi = table_mollifier();
        for edge in [-5.5, -5.0, 5.0, 5.5] {
            let coarse = (psi.eval(edge + 1e-3) - psi.eval(edge)).abs()
                + (psi.eval(edge - 1e-3) - psi.eval(edge)).abs();
            let fine = (psi.eval(edge + 1e-6) - psi.eval(edge)).abs()
                + (psi.eval(edge - 1e-6) - psi.eval(edge)).abs();
            assert!(fine <= coarse, "edge {edge}: {fine} > {coarse}");
            assert!(fine < 1e-6);
        }
    }

    #[test]
    fn rate_reference_values() {
        let r = NetProliferationRate::parabolic(1.5, table_mollifier());
        assert_eq!(r.eval(1.5), 1.0);
        assert!((r.eval(0.0) + 1.25).abs() < 1e-15);
        assert_eq!(r.eval(10.0), 0.0);
        assert!((r.eval(-5.0) + 41.25).abs() < 1e-12);
        assert!((r.death(-5.0) - 42.25).abs() < 1e-12);
    }

    #[test]
    fn rate_bounded_by_one_and_compactly_supported() {
        let r = NetProliferationRate::parabolic(1.5, table_mollifier());
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..100_000 {
            let v: f64 = rng.random_range(-15.0..15.0);
            let val = r.eval(v);
            assert!(val <= 1.0);
            if v.abs() >= 5.5 {
                assert_eq!(val, 0.0);
            }
        }
    }

    #[test]
    fn gaussian_kernel_peak() {
        let k = MutationKernel::gaussian(0.0, 0.4, 1.0);
        let expect = 1.0 / (2.0 * std::f64::consts::PI * 0.4).sqrt();
        assert!((k.eval(3.0, 3.0) - expect).abs() < 1e-15);
        assert!((expect - 0.63078).abs() < 1e-5);
    }

    #[test]
    fn kernel_marginal_mean_shift() {
        let k = MutationKernel::gaussian(0.3, 0.4, 0.1);
        assert!((k.shift() - 0.003).abs() < 1e-15);
        let grid = PhenotypeGrid::new(-1.0, 1.0, 4001).unwrap();
        let vals: Vec<f64> = grid.nodes().map(|v| k.eval(v, 0.2)).collect();
        let mass = grid.trapezium(&vals);
        let mean = grid.trapezium_weighted(&vals, |v| v) / mass;
        assert!((mass - 1.0).abs() < 1e-6);
        assert!((mean - 0.203).abs() < 1e-9);
    }

    #[test]
    fn gaussian_third_moment_matches_quadrature() {
        for (m, s2) in [(0.0, 0.4), (0.3, 0.4), (-1.0, 2.0)] {
            let grid = PhenotypeGrid::new(-30.0, 30.0, 60_001).unwrap();
            let vals: Vec<f64> = grid.nodes().map(|z| Gaussian.density(z, m, s2)).collect();
            let quad = grid.trapezium_weighted(&vals, |z| z.abs().powi(3));
            assert!(
                (Gaussian.third_abs_moment(m, s2) - quad).abs() < 1e-5,
                "{m} {s2}"
            );
        }
    }

    #[test]
    fn sampling_moments() {
        let mut rng = ChaCha8Rng::seed_from_u64(2024);
        let n = 1_000_000;
        let k = MutationKernel::gaussian(0.0, 0.4, 0.1);
        let mean = (0..n).map(|_| k.sample(2.0, &mut rng)).sum::<f64>() / n as f64;
        assert!((mean - 2.0).abs() < 3.0 * 0.0632 / 1e3);

        let k = MutationKernel::gaussian(0.3, 0.4, 1.0);
        let draws: Vec<f64> = (0..n).map(|_| k.sample(0.0, &mut rng)).collect();
        let m = draws.iter().sum::<f64>() / n as f64;
        let var = draws.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (n - 1) as f64;
        assert!((var - 0.4).abs() < 0.005);
        assert!((m - 0.3).abs() < 0.005);

        let k = MutationKernel::gaussian(0.3, 0.4, 1e-6);
        let x = k.sample(0.0, &mut rng);
        assert!(x.abs() < 1e-5);
    }

    #[test]
    fn reference_initial_datum() {
        let grid = PhenotypeGrid::with_spacing(-15.0, 15.0, 0.05).unwrap();
        let f0 = initial_distribution(grid);
        assert!((f0.density() - 0.3).abs() < 1e-6);
        let p = grid.trapezium_weighted(&f0.values, |v| v);
        let e = grid.trapezium_weighted(&f0.values, |v| v * v);
        assert!(p.abs() < 1e-9);
        assert!((e - 0.15).abs() < 1e-6);
        let direct = 3.0 / (10.0 * std::f64::consts::PI.sqrt());
        assert!((f0.values[300] - direct).abs() < 1e-15);
    }
}
