//! Simulation configuration, profiles and stability guards.

use std::fmt;
use std::str::FromStr;

use crate::error::{Result, SimError};
use crate::grid::PhenotypeGrid;
use crate::model::{InitialDatum, Mollifier, MutationKernel, NetProliferationRate, RateProfile};

/// Which of the three model representations to run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ModelKind {
    Abm,
    Ide,
    Pde,
}

impl ModelKind {
    pub fn tag(&self) -> &'static str {
        match self {
            ModelKind::Abm => "abm",
            ModelKind::Ide => "ide",
            ModelKind::Pde => "pde",
        }
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

impl FromStr for ModelKind {
    type Err = SimError;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "abm" => Ok(ModelKind::Abm),
            "ide" => Ok(ModelKind::Ide),
            "pde" => Ok(ModelKind::Pde),
            other => Err(SimError::config(
                "model",
                format!("unknown model `{other}`"),
            )),
        }
    }
}

/// Discretization of the advection term of the limit equation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum AdvectionScheme {
    /// First-order upwind chosen by the sign of the drift.
    #[default]
    Upwind,
    /// Second-order central difference.
    Central,
}

/// Parameter presets.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Profile {
    /// Reduced run sizes suitable for CI.
    #[default]
    Desk,
    /// The full reference parameter set (N = 10⁵, Δv = 0.025, Δt = 10⁻⁴, T = 10).
    Paper,
}

impl FromStr for Profile {
    type Err = SimError;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "desk" => Ok(Profile::Desk),
            "paper" => Ok(Profile::Paper),
            other => Err(SimError::config(
                "profile",
                format!("unknown profile `{other}`"),
            )),
        }
    }
}

/// Keys accepted in configuration files and `key=value` overrides.
pub const CONFIG_KEYS: [&str; 13] = [
    "n_agents", "dv", "dt", "t_final", "v_min", "v_max", "R", "delta", "v_m", "alpha", "beta",
    "epsilon", "seed",
];

/// Resolved parameters of one simulation.
#[derive(Debug, Clone, PartialEq)]
pub struct SimConfig {
    pub n_agents: usize,
    pub dv: f64,
    pub dt: f64,
    pub t_final: f64,
    pub v_min: f64,
    pub v_max: f64,
    pub radius: f64,
    pub delta: f64,
    pub v_m: f64,
    pub alpha: f64,
    pub beta: f64,
    pub epsilon: f64,
    pub seed: u64,
    pub model: ModelKind,
    pub snapshot_times: Vec<f64>,
    /// Time between recorded moment rows.
    pub moment_stride: f64,
    pub rate_profile: RateProfile,
    pub initial: InitialDatum,
    pub scheme: AdvectionScheme,
    /// Phenotype carried by reservoir agents.
    pub v0: f64,
    /// Constant proliferation rate.
    pub p0: f64,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self::desk()
    }
}

/// Guard limit shared by the agent-based step and the IDE relaxation term.
pub const STEP_GUARD_LIMIT: f64 = 0.1;
const GUARD_SLACK: f64 = 1e-12;

impl SimConfig {
    /// Reference parameter set.
    pub fn paper() -> Self {
        Self {
            n_agents: 100_000,
            dv: 0.025,
            dt: 1e-4,
            t_final: 10.0,
            v_min: -15.0,
            v_max: 15.0,
            radius: 5.0,
            delta: 0.5,
            v_m: 1.5,
            alpha: 0.0,
            beta: 0.4,
            epsilon: 1.0,
            seed: 42,
            model: ModelKind::Ide,
            snapshot_times: vec![10.0],
            moment_stride: 0.01,
            rate_profile: RateProfile::Parabolic { fittest: 1.5 },
            initial: InitialDatum::REFERENCE,
            scheme: AdvectionScheme::Upwind,
            v0: 0.0,
            p0: 1.0,
        }
    }

    /// CI-sized parameter set: N = 10⁴, Δv = 0.05, Δt = 10⁻³, T = 5, stride 0.05.
    pub fn desk() -> Self {
        Self {
            n_agents: 10_000,
            dv: 0.05,
            dt: 1e-3,
            t_final: 5.0,
            snapshot_times: vec![5.0],
            moment_stride: 0.05,
            ..Self::paper()
        }
    }

    pub fn for_profile(profile: Profile) -> Self {
        match profile {
            Profile::Desk => Self::desk(),
            Profile::Paper => Self::paper(),
        }
    }

    /// Applies the `key = value` lines of a configuration file on top of `self`.
    ///
    /// Blank lines and `#` comments are skipped; unknown keys are rejected.
    pub fn apply_text(&mut self, text: &str) -> Result<()> {
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                SimError::config(
                    format!("line {}", lineno + 1),
                    format!("expected `key = value`, found `{line}`"),
                )
            })?;
            self.set(key.trim(), value.trim())?;
        }
        Ok(())
    }

    /// Applies a single `key=value` override.
    pub fn apply_override(&mut self, assignment: &str) -> Result<()> {
        let (key, value) = assignment
            .split_once('=')
            .ok_or_else(|| SimError::config(assignment, "override must have the form key=value"))?;
        self.set(key.trim(), value.trim())
    }

    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        fn real(key: &str, value: &str) -> Result<f64> {
            let x: f64 = value
                .parse()
                .map_err(|_| SimError::config(key, format!("`{value}` is not a number")))?;
            if !x.is_finite() {
                return Err(SimError::config(key, "value must be finite"));
            }
            Ok(x)
        }
        match key {
            "n_agents" => {
                self.n_agents = value.parse().map_err(|_| {
                    SimError::config(key, format!("`{value}` is not a positive integer"))
                })?
            }
            "seed" => {
                self.seed = value
                    .parse()
                    .map_err(|_| SimError::config(key, format!("`{value}` is not a u64")))?
            }
            "dv" => self.dv = real(key, value)?,
            "dt" => self.dt = real(key, value)?,
            "t_final" => self.t_final = real(key, value)?,
            "v_min" => self.v_min = real(key, value)?,
            "v_max" => self.v_max = real(key, value)?,
            "R" => self.radius = real(key, value)?,
            "delta" => self.delta = real(key, value)?,
            "v_m" => {
                self.v_m = real(key, value)?;
                if let RateProfile::Parabolic { .. } = self.rate_profile {
                    self.rate_profile = RateProfile::Parabolic { fittest: self.v_m };
                }
            }
            "alpha" => self.alpha = real(key, value)?,
            "beta" => self.beta = real(key, value)?,
            "epsilon" => self.epsilon = real(key, value)?,
            other => return Err(SimError::config(other, "unknown configuration key")),
        }
        Ok(())
    }

    /// Key/value echo of every file-level parameter, in `CONFIG_KEYS` order.
    pub fn echo(&self) -> Vec<(&'static str, String)> {
        vec![
            ("n_agents", self.n_agents.to_string()),
            ("dv", self.dv.to_string()),
            ("dt", self.dt.to_string()),
            ("t_final", self.t_final.to_string()),
            ("v_min", self.v_min.to_string()),
            ("v_max", self.v_max.to_string()),
            ("R", self.radius.to_string()),
            ("delta", self.delta.to_string()),
            ("v_m", self.v_m.to_string()),
            ("alpha", self.alpha.to_string()),
            ("beta", self.beta.to_string()),
            ("epsilon", self.epsilon.to_string()),
            ("seed", self.seed.to_string()),
        ]
    }

    pub fn grid(&self) -> Result<PhenotypeGrid> {
        PhenotypeGrid::with_spacing(self.v_min, self.v_max, self.dv)
    }

    pub fn mollifier(&self) -> Mollifier {
        Mollifier::new(self.radius, self.delta)
    }

    pub fn rate(&self) -> NetProliferationRate {
        NetProliferationRate {
            profile: self.rate_profile,
            mollifier: self.mollifier(),
        }
    }

    pub fn kernel(&self) -> MutationKernel {
        MutationKernel::gaussian(self.alpha, self.beta, self.epsilon)
    }

    /// Phenotype-change rate `μ = 1/ε²`.
    pub fn mu(&self) -> f64 {
        1.0 / (self.epsilon * self.epsilon)
    }

    pub fn n_steps(&self) -> usize {
        (self.t_final / self.dt).round() as usize
    }

    pub fn moment_stride_steps(&self) -> usize {
        ((self.moment_stride / self.dt).round() as usize).max(1)
    }

    pub fn snapshot_steps(&self) -> Vec<usize> {
        self.snapshot_times
            .iter()
            .map(|t| (t / self.dt).round() as usize)
            .collect()
    }

    /// Checks parameter ranges and the stability guard of `self.model`.
    pub fn validate(&self) -> Result<GuardValues> {
        let positive = |key: &str, x: f64| -> Result<()> {
            if x > 0.0 && x.is_finite() {
                Ok(())
            } else {
                Err(SimError::config(key, format!("{x} must be positive")))
            }
        };
        positive("dt", self.dt)?;
        positive("t_final", self.t_final)?;
        positive("R", self.radius)?;
        positive("delta", self.delta)?;
        positive("beta", self.beta)?;
        positive("epsilon", self.epsilon)?;
        positive("moment_stride", self.moment_stride)?;
        if self.n_agents == 0 {
            return Err(SimError::config("n_agents", "must be positive"));
        }
        if self.t_final / self.dt > 1e12 {
            return Err(SimError::config(
                "dt",
                "t_final/dt exceeds the supported step count",
            ));
        }
        if let Some(t) = self
            .snapshot_times
            .iter()
            .find(|&&t| !(0.0..=self.t_final + 1e-12).contains(&t))
        {
            return Err(SimError::config(
                "snapshot_times",
                format!("snapshot time {t} outside [0, {}]", self.t_final),
            ));
        }
        if self.initial.mass > 1.0 {
            return Err(SimError::config(
                "initial",
                format!("initial mass {} exceeds 1", self.initial.mass),
            ));
        }
        let guards = self.guard_values()?;
        guards.check(self.model)?;
        Ok(guards)
    }

    /// Evaluates every guard quantity without enforcing any of them.
    pub fn guard_values(&self) -> Result<GuardValues> {
        let grid = self.grid()?;
        let rate = self.rate();
        let mu = self.mu();
        let r_sup = rate.sup_abs_on(&grid);
        let abm = self.p0.max(rate.sup_death_on(&grid)).max(mu) * self.dt;
        let ide = self.dt * (r_sup + 1.0 + mu);
        let pde =
            self.dt * (self.beta / (self.dv * self.dv) + self.alpha.abs() / self.dv + r_sup + 1.0);
        let kernel_mass_defect =
            crate::ide::KernelOperator::new(&self.kernel(), grid).max_interior_mass_defect();
        Ok(GuardValues {
            abm_step: abm,
            ide_step: ide,
            mu_dt: mu * self.dt,
            pde_cfl: pde,
            kernel_mass_defect,
        })
    }
}

/// Stability-guard quantities of a resolved configuration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GuardValues {
    /// `max(p0, max d, μ)·Δt`, must be ≤ 0.1.
    pub abm_step: f64,
    /// `Δt(‖r‖∞ + 1 + μ)`, must be < 1.
    pub ide_step: f64,
    /// `μΔt`, must be ≤ 0.1.
    pub mu_dt: f64,
    /// `Δt(β/Δv² + |α|/Δv + ‖r‖∞ + 1)`, must be < 1.
    pub pde_cfl: f64,
    /// Worst deviation from unit mass over interior kernel columns.
    pub kernel_mass_defect: f64,
}

impl GuardValues {
    pub fn check(&self, model: ModelKind) -> Result<()> {
        match model {
            ModelKind::Abm => check_le("abm_step", self.abm_step, STEP_GUARD_LIMIT),
            ModelKind::Ide => {
                check_le("ide_mu_dt", self.mu_dt, STEP_GUARD_LIMIT)?;
                check_lt("ide_step", self.ide_step, 1.0)
            }
            ModelKind::Pde => check_lt("pde_cfl", self.pde_cfl, 1.0),
        }
    }
}

pub(crate) fn check_le(guard: &'static str, value: f64, limit: f64) -> Result<()> {
    if value <= limit * (1.0 + GUARD_SLACK) {
        Ok(())
    } else {
        Err(SimError::Guard {
            guard,
            value,
            limit,
        })
    }
}

pub(crate) fn check_lt(guard: &'static str, value: f64, limit: f64) -> Result<()> {
    if value < limit {
        Ok(())
    } else {
        Err(SimError::Guard {
            guard,
            value,
            limit,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn desk_guards_hold_for_all_models() {
        for eps in [1.0, 10f64.powf(-0.5), 0.1] {
            for alpha in [-0.3, 0.0, 0.3] {
                for model in [ModelKind::Abm, ModelKind::Ide, ModelKind::Pde] {
                    let cfg = SimConfig {
                        epsilon: eps,
                        alpha,
                        model,
                        ..SimConfig::desk()
                    };
                    cfg.validate().unwrap();
                }
            }
        }
    }

    #[test]
    fn paper_guards_hold() {
        let g = SimConfig {
            epsilon: 0.1,
            alpha: 0.3,
            ..SimConfig::paper()
        }
        .guard_values()
        .unwrap();
        assert!((g.mu_dt - 0.01).abs() < 1e-12);
        assert!(g.pde_cfl < 1.0);
    }

    #[test]
    fn pde_guard_violation_reports_value() {
        let cfg = SimConfig {
            model: ModelKind::Pde,
            dt: 0.01,
            ..SimConfig::desk()
        };
        match cfg.validate() {
            Err(SimError::Guard { guard, value, .. }) => {
                assert_eq!(guard, "pde_cfl");
                assert!(value > 1.0);
            }
            other => panic!("expected guard error, got {other:?}"),
        }
    }

    #[test]
    fn parses_config_text() {
        let mut cfg = SimConfig::desk();
        cfg.apply_text("# comment\nalpha = 0.3\n\nepsilon=0.1\nseed = 7\nR = 6\nv_m = 1.0\n")
            .unwrap();
        assert_eq!(cfg.alpha, 0.3);
        assert_eq!(cfg.epsilon, 0.1);
        assert_eq!(cfg.seed, 7);
        assert_eq!(cfg.radius, 6.0);
        assert_eq!(cfg.rate_profile, RateProfile::Parabolic { fittest: 1.0 });
    }

    #[test]
    fn rejects_unknown_and_malformed_keys() {
        let mut cfg = SimConfig::desk();
        let err = cfg.apply_text("gamma = 1").unwrap_err();
        assert!(err.to_string().contains("gamma"));
        assert!(cfg.apply_text("alpha 0.3").is_err());
        assert!(cfg.apply_override("dt=abc").is_err());
        assert!(cfg.apply_override("n_agents=-4").is_err());
    }

    #[test]
    fn echo_covers_every_key() {
        let keys: Vec<_> = SimConfig::desk()
            .echo()
            .into_iter()
            .map(|(k, _)| k)
            .collect();
        assert_eq!(keys, CONFIG_KEYS.to_vec());
    }

    #[test]
    fn initial_mass_above_one_is_rejected() {
        let mut cfg = SimConfig::desk();
        cfg.initial.mass = 1.2;
        assert!(matches!(cfg.validate(), Err(SimError::Config { .. })));
    }
}
