//! Moments, norms, cross-model distances, convergence fits and the
//! closed-form constant-rate oracles.

use rayon::prelude::*;

use crate::config::{ModelKind, SimConfig};
use crate::error::{Result, SimError};
use crate::grid::DistributionState;
use crate::model::NetProliferationRate;

/// Below this density the mean and variance are reported as undefined.
pub const DENSITY_FLOOR: f64 = 1e-8;

/// Density, momentum, bulk energy and the derived mean/variance.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Moments {
    pub rho: f64,
    pub p: f64,
    pub energy: f64,
    pub mean: Option<f64>,
    pub variance: Option<f64>,
}

impl Moments {
    pub fn from_raw(rho: f64, p: f64, energy: f64) -> Self {
        let (mean, variance) = if rho > DENSITY_FLOOR {
            let m = p / rho;
            (Some(m), Some(energy / rho - m * m))
        } else {
            (None, None)
        };
        Self {
            rho,
            p,
            energy,
            mean,
            variance,
        }
    }
}

/// Trapezium moments of a grid distribution.
pub fn moments(f: &DistributionState) -> Moments {
    let grid = &f.grid;
    let n = f.values.len();
    let (mut rho, mut p, mut e) = (0.0, 0.0, 0.0);
    for (k, &val) in f.values.iter().enumerate() {
        let w = if k == 0 || k == n - 1 { 0.5 } else { 1.0 };
        let v = grid.node(k);
        rho += w * val;
        p += w * v * val;
        e += w * v * v * val;
    }
    let dv = grid.dv();
    Moments::from_raw(rho * dv, p * dv, e * dv)
}

/// Time series of moments; undefined mean/variance are stored as NaN.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct MomentSeries {
    pub times: Vec<f64>,
    pub rho: Vec<f64>,
    pub p: Vec<f64>,
    pub energy: Vec<f64>,
    pub mean: Vec<f64>,
    pub variance: Vec<f64>,
}

impl MomentSeries {
    pub fn push(&mut self, t: f64, m: Moments) {
        self.times.push(t);
        self.rho.push(m.rho);
        self.p.push(m.p);
        self.energy.push(m.energy);
        self.mean.push(m.mean.unwrap_or(f64::NAN));
        self.variance.push(m.variance.unwrap_or(f64::NAN));
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    /// Index of the recorded time closest to `t`.
    pub fn index_at(&self, t: f64) -> Option<usize> {
        self.times
            .iter()
            .enumerate()
            .min_by(|a, b| (a.1 - t).abs().total_cmp(&(b.1 - t).abs()))
            .map(|(i, _)| i)
    }

    fn check_aligned(&self, other: &MomentSeries) -> Result<()> {
        if self.len() != other.len()
            || self
                .times
                .iter()
                .zip(&other.times)
                .any(|(a, b)| (a - b).abs() > 1e-9)
        {
            return Err(SimError::usage(
                "moment series are recorded at different times",
            ));
        }
        Ok(())
    }

    /// `sup_t` of the absolute differences in (ρ, p, E) against `other`.
    pub fn sup_differences(&self, other: &MomentSeries) -> Result<[f64; 3]> {
        self.check_aligned(other)?;
        let sup = |a: &[f64], b: &[f64]| {
            a.iter()
                .zip(b)
                .fold(0.0f64, |m, (x, y)| m.max((x - y).abs()))
        };
        Ok([
            sup(&self.rho, &other.rho),
            sup(&self.p, &other.p),
            sup(&self.energy, &other.energy),
        ])
    }
}

/// Seed-averaged moment series with standard errors of the mean.
#[derive(Debug, Clone, PartialEq)]
pub struct EnsembleSeries {
    pub mean: MomentSeries,
    pub rho_se: Vec<f64>,
    pub p_se: Vec<f64>,
    pub energy_se: Vec<f64>,
    pub members: usize,
}

impl EnsembleSeries {
    pub fn from_runs(runs: &[MomentSeries]) -> Result<Self> {
        let first = runs
            .first()
            .ok_or_else(|| SimError::usage("ensemble needs at least one run"))?;
        for r in runs {
            first.check_aligned(r)?;
        }
        let n = runs.len() as f64;
        let stats = |pick: fn(&MomentSeries) -> &Vec<f64>, i: usize| {
            let m = runs.iter().map(|r| pick(r)[i]).sum::<f64>() / n;
            let se = if runs.len() > 1 {
                let var = runs.iter().map(|r| (pick(r)[i] - m).powi(2)).sum::<f64>() / (n - 1.0);
                (var / n).sqrt()
            } else {
                0.0
            };
            (m, se)
        };
        let mut mean = MomentSeries::default();
        let (mut rho_se, mut p_se, mut energy_se) = (vec![], vec![], vec![]);
        for i in 0..first.len() {
            let (rho, rs) = stats(|r| &r.rho, i);
            let (p, ps) = stats(|r| &r.p, i);
            let (e, es) = stats(|r| &r.energy, i);
            mean.push(first.times[i], Moments::from_raw(rho, p, e));
            rho_se.push(rs);
            p_se.push(ps);
            energy_se.push(es);
        }
        Ok(Self {
            mean,
            rho_se,
            p_se,
            energy_se,
            members: runs.len(),
        })
    }
}

/// `‖f - g‖_{L²}` by the trapezium rule on the shared grid.
pub fn l2_distance(f: &DistributionState, g: &DistributionState) -> Result<f64> {
    if !f.grid.same_as(&g.grid) {
        return Err(SimError::usage("l2_distance needs states on the same grid"));
    }
    let sq: Vec<f64> = f
        .values
        .iter()
        .zip(&g.values)
        .map(|(a, b)| (a - b) * (a - b))
        .collect();
    Ok(f.grid.trapezium(&sq).max(0.0).sqrt())
}

/// Density of the constant-rate problem: `ρ(t) = r ρ⁰ / ((r - ρ⁰) e^{-rt} + ρ⁰)`.
pub fn logistic_oracle(r0: f64, rho0: f64, t: f64) -> Result<f64> {
    if !(r0 > 0.0) {
        return Err(SimError::usage(format!(
            "logistic oracle needs r0 > 0, got {r0}"
        )));
    }
    if !(rho0 > 0.0 && rho0 <= r0) {
        return Err(SimError::usage(format!(
            "logistic oracle needs 0 < rho0 <= r0, got rho0 = {rho0}"
        )));
    }
    Ok(r0 * rho0 / ((r0 - rho0) * (-r0 * t).exp() + rho0))
}

/// Least-squares fit of `ln y = slope · ln x + intercept`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LogLogFit {
    pub slope: f64,
    pub intercept: f64,
    /// Root-mean-square residual in log space.
    pub residual: f64,
}

pub fn fit_log_log(x: &[f64], y: &[f64]) -> std::result::Result<LogLogFit, String> {
    if x.len() != y.len() {
        return Err(format!(
            "length mismatch: {} regressors, {} values",
            x.len(),
            y.len()
        ));
    }
    if x.len() < 2 {
        return Err("at least two points are needed".into());
    }
    if let Some(bad) = x.iter().chain(y).find(|&&a| !(a > 0.0 && a.is_finite())) {
        return Err(format!(
            "non-positive or non-finite value {bad} cannot be log-transformed"
        ));
    }
    let lx: Vec<f64> = x.iter().map(|a| a.ln()).collect();
    let ly: Vec<f64> = y.iter().map(|a| a.ln()).collect();
    let n = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxx: f64 = lx.iter().map(|a| (a - mx) * (a - mx)).sum();
    if sxx <= 1e-24 {
        return Err("zero spread in the regressor: all epsilon values coincide".into());
    }
    let sxy: f64 = lx.iter().zip(&ly).map(|(a, b)| (a - mx) * (b - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let rss: f64 = lx
        .iter()
        .zip(&ly)
        .map(|(a, b)| (b - intercept - slope * a).powi(2))
        .sum();
    Ok(LogLogFit {
        slope,
        intercept,
        residual: (rss / n).sqrt(),
    })
}

/// Metric names, in report column order.
pub const CONVERGENCE_METRICS: [&str; 4] = ["l2_final", "rho_sup", "p_sup", "E_sup"];

#[derive(Debug, Clone, PartialEq)]
pub struct OrderFit {
    pub metric: &'static str,
    pub fit: std::result::Result<LogLogFit, String>,
}

/// IDE-to-PDE distances along a sequence of scaling parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceReport {
    pub alpha: f64,
    pub epsilons: Vec<f64>,
    pub l2_final: Vec<f64>,
    pub rho_sup: Vec<f64>,
    pub p_sup: Vec<f64>,
    pub energy_sup: Vec<f64>,
    pub fitted_orders: Vec<OrderFit>,
}

impl ConvergenceReport {
    pub fn metric(&self, name: &str) -> Option<&[f64]> {
        match name {
            "l2_final" => Some(&self.l2_final),
            "rho_sup" => Some(&self.rho_sup),
            "p_sup" => Some(&self.p_sup),
            "E_sup" => Some(&self.energy_sup),
            _ => None,
        }
    }

    /// Builds the report from a PDE reference and IDE runs, one per epsilon.
    pub fn from_runs(
        alpha: f64,
        epsilons: &[f64],
        pde: &(MomentSeries, DistributionState),
        ide: &[(MomentSeries, DistributionState)],
    ) -> Result<Self> {
        if epsilons.len() != ide.len() {
            return Err(SimError::usage("one IDE run per epsilon is required"));
        }
        let mut report = ConvergenceReport {
            alpha,
            epsilons: epsilons.to_vec(),
            l2_final: vec![],
            rho_sup: vec![],
            p_sup: vec![],
            energy_sup: vec![],
            fitted_orders: vec![],
        };
        for (series, state) in ide {
            let [r, p, e] = series.sup_differences(&pde.0)?;
            report.l2_final.push(l2_distance(state, &pde.1)?);
            report.rho_sup.push(r);
            report.p_sup.push(p);
            report.energy_sup.push(e);
        }
        report.fitted_orders = CONVERGENCE_METRICS
            .iter()
            .map(|&metric| OrderFit {
                metric,
                fit: fit_log_log(epsilons, report.metric(metric).unwrap()),
            })
            .collect();
        Ok(report)
    }

    pub fn strictly_decreasing(&self, metric: &str) -> bool {
        self.metric(metric)
            .map(|m| m.windows(2).all(|w| w[1] < w[0]))
            .unwrap_or(false)
    }
}

/// Runs the limit equation once and the IDE for every epsilon, sorted
/// from largest to smallest, and compares them.
pub fn epsilon_sweep(base: &SimConfig, epsilons: &[f64]) -> Result<ConvergenceReport> {
    if epsilons.len() < 2 {
        return Err(SimError::usage(
            "an epsilon sweep needs at least two values",
        ));
    }
    let mut eps = epsilons.to_vec();
    eps.sort_by(|a, b| b.total_cmp(a));
    let pde_cfg = SimConfig {
        model: ModelKind::Pde,
        ..base.clone()
    };
    let pde = crate::pde::pde_run(&pde_cfg)?;
    let ide: Vec<_> = eps
        .par_iter()
        .map(|&e| {
            let cfg = SimConfig {
                model: ModelKind::Ide,
                epsilon: e,
                ..base.clone()
            };
            crate::ide::ide_run(&cfg).map(|run| (run.series, run.final_state))
        })
        .collect::<Result<_>>()?;
    ConvergenceReport::from_runs(base.alpha, &eps, &(pde.series, pde.final_state), &ide)
}

/// Largest moment-equation residuals over the interior snapshot times.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MomentResiduals {
    pub rho: f64,
    pub p: f64,
    pub energy: f64,
}

impl MomentResiduals {
    pub fn max(&self) -> f64 {
        self.rho.max(self.p).max(self.energy)
    }
}

/// Right-hand sides of the density, momentum and energy equations at one state.
///
/// `diffusion` is `β + α²ε²` for the integro-differential model and `β` for
/// the limit equation.
pub fn moment_rates(
    f: &DistributionState,
    rate: &NetProliferationRate,
    alpha: f64,
    diffusion: f64,
) -> [f64; 3] {
    let m = moments(f);
    let grid = &f.grid;
    let n = f.values.len();
    let (mut r0, mut r1, mut r2) = (0.0, 0.0, 0.0);
    for (k, &val) in f.values.iter().enumerate() {
        let w = if k == 0 || k == n - 1 { 0.5 } else { 1.0 };
        let v = grid.node(k);
        let rf = w * rate.eval(v) * val;
        r0 += rf;
        r1 += v * rf;
        r2 += v * v * rf;
    }
    let dv = grid.dv();
    [
        r0 * dv - m.rho * m.rho,
        r1 * dv - m.rho * m.p + alpha * m.rho,
        r2 * dv - m.rho * m.energy + 2.0 * alpha * m.p + diffusion * m.rho,
    ]
}

/// Compares finite-difference time derivatives of the recorded moments with
/// the moment equations evaluated on the recorded states.
///
/// The fourth-order centered stencil is used when at least five equally
/// spaced records exist, the three-point stencil otherwise.
#[allow(clippy::too_many_arguments)]
pub fn moment_ode_residual(
    series: &MomentSeries,
    states: &[DistributionState],
    rate: &NetProliferationRate,
    alpha: f64,
    beta: f64,
    epsilon: f64,
    model: ModelKind,
) -> Result<MomentResiduals> {
    let n = series.len();
    if n < 3 {
        return Err(SimError::usage(format!(
            "moment residuals need at least 3 records, got {n}"
        )));
    }
    if states.len() != n {
        return Err(SimError::usage("one state per moment record is required"));
    }
    let h = series.times[1] - series.times[0];
    if !(h > 0.0)
        || series
            .times
            .windows(2)
            .any(|w| ((w[1] - w[0]) - h).abs() > 1e-9 * h.max(1.0))
    {
        return Err(SimError::usage(
            "moment records must be equally spaced in time",
        ));
    }
    let diffusion = match model {
        ModelKind::Pde => beta,
        ModelKind::Ide | ModelKind::Abm => beta + alpha * alpha * epsilon * epsilon,
    };
    let columns = [&series.rho, &series.p, &series.energy];
    let derivative = |c: &[f64], i: usize| -> f64 {
        if n >= 5 {
            (-c[i + 2] + 8.0 * c[i + 1] - 8.0 * c[i - 1] + c[i - 2]) / (12.0 * h)
        } else {
            (c[i + 1] - c[i - 1]) / (2.0 * h)
        }
    };
    let interior = if n >= 5 { 2..n - 2 } else { 1..n - 1 };
    let mut worst = [0.0f64; 3];
    for i in interior {
        let rhs = moment_rates(&states[i], rate, alpha, diffusion);
        for (m, column) in columns.iter().enumerate() {
            worst[m] = worst[m].max((derivative(column, i) - rhs[m]).abs());
        }
    }
    Ok(MomentResiduals {
        rho: worst[0],
        p: worst[1],
        energy: worst[2],
    })
}
