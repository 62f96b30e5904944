//! CSV and manifest writers.
//!
//! Numbers are written as `{:.16e}` (17 significant digits), rows end in LF
//! and every file starts with a header row. Undefined values are written as
//! `NaN`.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::analysis::{ConvergenceReport, EnsembleSeries, MomentSeries};
use crate::config::ModelKind;
use crate::error::Result;
use crate::grid::DistributionState;

pub const MOMENTS_HEADER: &str = "t,rho,p,E,mean,variance";
pub const ENSEMBLE_HEADER: &str = "t,rho,p,E,mean,variance,rho_se,p_se,E_se";
pub const SNAPSHOT_HEADER: &str = "v,f_estimate";
pub const CONVERGENCE_HEADER: &str = "epsilon,l2_final,rho_sup,p_sup,E_sup";
pub const ORDERS_HEADER: &str = "metric,slope,fit_residual";

pub fn fmt_num(x: f64) -> String {
    format!("{x:.16e}")
}

fn push_row(out: &mut String, cells: &[f64]) {
    for (i, &c) in cells.iter().enumerate() {
        if i > 0 {
            out.push(',');
        }
        let _ = write!(out, "{c:.16e}");
    }
    out.push('\n');
}

pub fn moments_csv(series: &MomentSeries) -> String {
    let mut out = format!("{MOMENTS_HEADER}\n");
    for i in 0..series.len() {
        push_row(
            &mut out,
            &[
                series.times[i],
                series.rho[i],
                series.p[i],
                series.energy[i],
                series.mean[i],
                series.variance[i],
            ],
        );
    }
    out
}

/// Seed-averaged moments followed by the standard errors of ρ, p and E.
pub fn ensemble_csv(ensemble: &EnsembleSeries) -> String {
    let s = &ensemble.mean;
    let mut out = format!("{ENSEMBLE_HEADER}\n");
    for i in 0..s.len() {
        push_row(
            &mut out,
            &[
                s.times[i],
                s.rho[i],
                s.p[i],
                s.energy[i],
                s.mean[i],
                s.variance[i],
                ensemble.rho_se[i],
                ensemble.p_se[i],
                ensemble.energy_se[i],
            ],
        );
    }
    out
}

pub fn snapshot_csv(state: &DistributionState) -> String {
    let mut out = format!("{SNAPSHOT_HEADER}\n");
    for (v, &f) in state.grid.nodes().zip(&state.values) {
        push_row(&mut out, &[v, f]);
    }
    out
}

pub fn convergence_csv(report: &ConvergenceReport) -> String {
    let mut out = format!("{CONVERGENCE_HEADER}\n");
    for i in 0..report.epsilons.len() {
        push_row(
            &mut out,
            &[
                report.epsilons[i],
                report.l2_final[i],
                report.rho_sup[i],
                report.p_sup[i],
                report.energy_sup[i],
            ],
        );
    }
    out
}

/// Fitted log-log slopes; a failed fit is written as `NaN,NaN`.
pub fn orders_csv(report: &ConvergenceReport) -> String {
    let mut out = format!("{ORDERS_HEADER}\n");
    for order in &report.fitted_orders {
        let (slope, residual) = match &order.fit {
            Ok(fit) => (fit.slope, fit.residual),
            Err(_) => (f64::NAN, f64::NAN),
        };
        let _ = writeln!(out, "{},{slope:.16e},{residual:.16e}", order.metric);
    }
    out
}

/// `key = value` lines.
pub fn manifest_text<K: AsRef<str>, V: AsRef<str>>(entries: &[(K, V)]) -> String {
    let mut out = String::new();
    for (k, v) in entries {
        let _ = writeln!(out, "{} = {}", k.as_ref(), v.as_ref());
    }
    out
}

pub fn alpha_tag(alpha: f64) -> String {
    format!("a{alpha:+.3}")
}

/// `e<ε>` for the scaled models, `elim` for the limit equation.
pub fn epsilon_tag(model: ModelKind, epsilon: f64) -> String {
    match model {
        ModelKind::Pde => "elim".to_string(),
        _ => format!("e{epsilon:.4}"),
    }
}

fn stem(model: ModelKind, alpha: f64, epsilon: f64) -> String {
    format!(
        "{}_{}_{}",
        model.tag(),
        alpha_tag(alpha),
        epsilon_tag(model, epsilon)
    )
}

pub fn moments_file_name(model: ModelKind, alpha: f64, epsilon: f64) -> String {
    format!("{}_moments.csv", stem(model, alpha, epsilon))
}

pub fn snapshot_file_name(model: ModelKind, alpha: f64, epsilon: f64, t: f64) -> String {
    format!("{}_snapshot_t{t:.3}.csv", stem(model, alpha, epsilon))
}

/// Writes `contents` to a sibling temporary file and renames it over `path`.
pub fn write_atomic(path: &Path, contents: &str) -> Result<()> {
    let dir = path.parent().filter(|d| !d.as_os_str().is_empty());
    let dir = dir.unwrap_or_else(|| Path::new("."));
    let name = path
        .file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_default();
    let tmp = dir.join(format!(".{name}.tmp{}", std::process::id()));
    fs::write(&tmp, contents)?;
    if let Err(e) = fs::rename(&tmp, path) {
        let _ = fs::remove_file(&tmp);
        return Err(e.into());
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analysis::Moments;
    use crate::grid::PhenotypeGrid;

    #[test]
    fn numbers_round_trip_exactly() {
        for x in [0.1, 1.0 / 3.0, -2.5e-17, 42.25, std::f64::consts::PI] {
            assert_eq!(fmt_num(x).parse::<f64>().unwrap(), x);
        }
    }

    #[test]
    fn moments_rows() {
        let mut s = MomentSeries::default();
        s.push(0.0, Moments::from_raw(0.3, 0.0, 0.15));
        s.push(0.05, Moments::from_raw(0.0, 0.0, 0.0));
        let csv = moments_csv(&s);
        let lines: Vec<_> = csv.lines().collect();
        assert_eq!(lines[0], MOMENTS_HEADER);
        assert_eq!(lines.len(), 3);
        assert!(lines[2].ends_with("NaN,NaN"));
        assert!(!csv.contains('\r'));
        let cells: Vec<f64> = lines[1].split(',').map(|c| c.parse().unwrap()).collect();
        assert_eq!(cells[1], 0.3);
        assert!((cells[5] - 0.5).abs() < 1e-15);
    }

    #[test]
    fn snapshot_rows() {
        let grid = PhenotypeGrid::new(-1.0, 1.0, 5).unwrap();
        let state = DistributionState::from_fn(grid, |v| v * v);
        let csv = snapshot_csv(&state);
        assert_eq!(csv.lines().count(), 6);
        assert_eq!(
            csv.lines().nth(2).unwrap(),
            format!("{},{}", fmt_num(-0.5), fmt_num(0.25))
        );
    }

    #[test]
    fn file_names() {
        assert_eq!(
            moments_file_name(ModelKind::Ide, 0.3, 0.1),
            "ide_a+0.300_e0.1000_moments.csv"
        );
        assert_eq!(
            moments_file_name(ModelKind::Pde, -0.3, 0.1),
            "pde_a-0.300_elim_moments.csv"
        );
        assert_eq!(
            snapshot_file_name(ModelKind::Abm, 0.0, 10f64.powf(-0.5), 5.0),
            "abm_a+0.000_e0.3162_snapshot_t5.000.csv"
        );
    }

    #[test]
    fn atomic_write_replaces_target() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("out.csv");
        write_atomic(&path, "a\n").unwrap();
        write_atomic(&path, "b\n").unwrap();
        assert_eq!(fs::read_to_string(&path).unwrap(), "b\n");
        assert_eq!(fs::read_dir(dir.path()).unwrap().count(), 1);
    }

    #[test]
    fn manifest_lines() {
        let text = manifest_text(&[("seed", "42"), ("model", "ide")]);
        assert_eq!(text, "seed = 42\nmodel = ide\n");
    }
}
