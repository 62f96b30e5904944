//! Acceptance criteria for the three models on the desk profile.
//!
//! [`run_all`] prints one `PASS`/`FAIL` line per criterion followed by
//! indented detail lines.

use std::time::Instant;

use rayon::prelude::*;

use phenokin::analysis::{moment_ode_residual, ConvergenceReport, CONVERGENCE_METRICS};
use phenokin::{
    abm_run, ide_run, l2_distance, logistic_oracle, pde_run, AdvectionScheme, Diagnostics,
    EnsembleSeries, GridRun, KernelOperator, ModelKind, MomentSeries, MutationKernel, RateProfile,
    SimConfig,
};

const ALPHAS: [f64; 3] = [-0.3, 0.0, 0.3];
const BETA: f64 = 0.4;
const SEEDS: u64 = 10;

fn epsilons() -> [f64; 3] {
    [1.0, 10f64.powf(-0.5), 0.1]
}

struct Outcome {
    pass: bool,
    details: Vec<String>,
}

impl Outcome {
    fn new() -> Self {
        Outcome {
            pass: true,
            details: Vec::new(),
        }
    }

    fn check(&mut self, ok: bool, line: String) {
        self.pass &= ok;
        self.details
            .push(format!("{} {line}", if ok { "ok  " } else { "FAIL" }));
    }
}

struct Entry {
    id: u32,
    title: &'static str,
    seconds: f64,
    outcome: Outcome,
}

fn report(id: u32, title: &'static str, started: Instant, outcome: Outcome) -> Entry {
    Entry {
        id,
        title,
        seconds: started.elapsed().as_secs_f64(),
        outcome,
    }
}

fn print(entry: &Entry) {
    println!(
        "{} criterion {}: {} ({:.1}s)",
        if entry.outcome.pass { "PASS" } else { "FAIL" },
        entry.id,
        entry.title,
        entry.seconds
    );
    for d in &entry.outcome.details {
        println!("    {d}");
    }
}

fn desk(model: ModelKind, alpha: f64, epsilon: f64) -> SimConfig {
    SimConfig {
        model,
        alpha,
        epsilon,
        beta: BETA,
        ..SimConfig::desk()
    }
}

fn kernel_identities() -> Outcome {
    let mut out = Outcome::new();
    let grid = SimConfig::desk().grid().unwrap();
    let n = grid.len();
    for alpha in ALPHAS {
        for eps in epsilons() {
            let kernel = MutationKernel::gaussian(alpha, BETA, eps);
            let op = KernelOperator::new(&kernel, grid);
            let (mut e0, mut e1, mut e2) = (0.0f64, 0.0f64, 0.0f64);
            for i in 0..20 {
                let j = n / 4 + i * (n / 2) / 20;
                let (mass, mean, var) = op.column_moments(j);
                e0 = e0.max((mass - 1.0).abs());
                e1 = e1.max((mean - alpha * eps * eps).abs());
                e2 = e2.max((var - BETA * eps * eps).abs());
            }
            out.check(
                e0 <= 1e-6 && e1 <= 1e-6 && e2 <= 1e-6,
                format!(
                    "alpha={alpha:+.1} eps={eps:.4}: |mass-1|={e0:.1e} |shift err|={e1:.1e} |var err|={e2:.1e}"
                ),
            );
        }
    }
    out
}

fn logistic_config(model: ModelKind) -> SimConfig {
    SimConfig {
        rate_profile: RateProfile::Constant { value: 1.0 },
        radius: 12.0,
        delta: 0.5,
        ..desk(model, 0.0, 1.0)
    }
}

fn logistic(diags: &mut Vec<(String, Diagnostics)>) -> Outcome {
    let mut out = Outcome::new();
    let rho0 = 0.3;
    for model in [ModelKind::Ide, ModelKind::Pde] {
        let cfg = logistic_config(model);
        let run = if model == ModelKind::Ide {
            ide_run(&cfg)
        } else {
            pde_run(&cfg)
        }
        .unwrap();
        let err = run
            .series
            .times
            .iter()
            .zip(&run.series.rho)
            .map(|(&t, &r)| (r - logistic_oracle(1.0, rho0, t).unwrap()).abs())
            .fold(0.0, f64::max);
        out.check(
            err <= 5.0 * cfg.dt,
            format!(
                "{model}: max_t |rho - logistic| = {err:.2e} (bound {:.1e})",
                5.0 * cfg.dt
            ),
        );
        diags.push((format!("{model} logistic"), run.diagnostics));
    }

    let runs: Vec<MomentSeries> = (1..=SEEDS)
        .into_par_iter()
        .map(|seed| {
            let cfg = SimConfig {
                seed,
                ..logistic_config(ModelKind::Abm)
            };
            abm_run(&cfg).unwrap().series
        })
        .collect();
    let ens = EnsembleSeries::from_runs(&runs).unwrap();
    for t in [1.0, 2.5, 5.0] {
        let i = ens.mean.index_at(t).unwrap();
        let exact = logistic_oracle(1.0, rho0, t).unwrap();
        let dev = (ens.mean.rho[i] - exact).abs();
        let se = ens.rho_se[i];
        out.check(
            dev <= 3.0 * se,
            format!(
                "abm t={t}: |mean rho - logistic| = {dev:.2e}, 3 SE = {:.2e}",
                3.0 * se
            ),
        );
    }
    out
}

fn propositions(diags: &[(String, Diagnostics)]) -> Outcome {
    let mut out = Outcome::new();
    for (name, d) in diags {
        let violations = d.violations();
        let summary = format!(
            "{name}: excursion {:.1e}, rho in [{:.4}, {:.4}], L2 ratio {:.3}, boundary {:.1e}",
            d.max_relative_excursion,
            d.density_min,
            d.density_max,
            d.l2_bound_ratio,
            d.boundary_max
        );
        if violations.is_empty() {
            out.check(true, summary);
        } else {
            let msgs: Vec<String> = violations.iter().map(|e| e.to_string()).collect();
            out.check(false, format!("{summary}; {}", msgs.join("; ")));
        }
    }
    out
}

fn residuals(ide: &[((f64, f64), GridRun)], pde_central: &[(f64, GridRun)]) -> Outcome {
    let mut out = Outcome::new();
    for ((alpha, eps), run) in ide {
        let cfg = desk(ModelKind::Ide, *alpha, *eps);
        let res = moment_ode_residual(
            &run.series,
            &run.trajectory,
            &cfg.rate(),
            *alpha,
            BETA,
            *eps,
            ModelKind::Ide,
        )
        .unwrap();
        out.check(
            res.max() <= 5e-3,
            format!(
                "ide alpha={alpha:+.1} eps={eps:.4}: rho {:.1e} p {:.1e} E {:.1e}",
                res.rho, res.p, res.energy
            ),
        );
    }
    for (alpha, run) in pde_central {
        let cfg = desk(ModelKind::Pde, *alpha, 1.0);
        let res = moment_ode_residual(
            &run.series,
            &run.trajectory,
            &cfg.rate(),
            *alpha,
            BETA,
            1.0,
            ModelKind::Pde,
        )
        .unwrap();
        out.check(
            res.max() <= 5e-3,
            format!(
                "pde (central) alpha={alpha:+.1}: rho {:.1e} p {:.1e} E {:.1e}",
                res.rho, res.p, res.energy
            ),
        );
    }
    out
}

fn find(ide: &[((f64, f64), GridRun)], alpha: f64, eps: f64) -> &GridRun {
    &ide.iter().find(|(k, _)| *k == (alpha, eps)).unwrap().1
}

fn convergence(ide: &[((f64, f64), GridRun)], pde: &[(f64, GridRun)]) -> Outcome {
    let mut out = Outcome::new();
    let eps = epsilons();
    for (alpha, g) in pde {
        let runs: Vec<_> = eps
            .iter()
            .map(|&e| {
                let r = find(ide, *alpha, e);
                (r.series.clone(), r.final_state.clone())
            })
            .collect();
        let report = ConvergenceReport::from_runs(
            *alpha,
            &eps,
            &(g.series.clone(), g.final_state.clone()),
            &runs,
        )
        .unwrap();
        for (metric, fit) in CONVERGENCE_METRICS.iter().zip(&report.fitted_orders) {
            let values = report.metric(metric).unwrap();
            let decreasing = report.strictly_decreasing(metric);
            let slope = fit.fit.as_ref().map(|f| f.slope).unwrap_or(f64::NAN);
            out.check(
                decreasing && (0.4..=2.0).contains(&slope),
                format!(
                    "alpha={alpha:+.1} {metric}: [{:.3e}, {:.3e}, {:.3e}] decreasing={decreasing} slope={slope:.3}",
                    values[0], values[1], values[2]
                ),
            );
        }
    }
    out
}

fn mean_field(ide: &[((f64, f64), GridRun)]) -> Outcome {
    let mut out = Outcome::new();
    let jobs: Vec<(f64, f64)> = ALPHAS
        .iter()
        .flat_map(|&a| epsilons().map(|e| (a, e)))
        .collect();
    let ensembles: Vec<EnsembleSeries> = jobs
        .par_iter()
        .map(|&(alpha, eps)| {
            let runs: Vec<MomentSeries> = (1..=SEEDS)
                .map(|seed| {
                    let cfg = SimConfig {
                        seed,
                        ..desk(ModelKind::Abm, alpha, eps)
                    };
                    abm_run(&cfg).unwrap().series
                })
                .collect();
            EnsembleSeries::from_runs(&runs).unwrap()
        })
        .collect();
    for (&(alpha, eps), ens) in jobs.iter().zip(&ensembles) {
        let reference = &find(ide, alpha, eps).series;
        let (mut worst_rho, mut worst_p) = (f64::NEG_INFINITY, f64::NEG_INFINITY);
        let (mut at_rho, mut at_p) = (String::new(), String::new());
        let mut ok = reference.len() == ens.mean.len();
        for i in 0..ens.mean.len().min(reference.len()) {
            let dr = (ens.mean.rho[i] - reference.rho[i]).abs();
            let dp = (ens.mean.p[i] - reference.p[i]).abs();
            let br = 0.02f64.max(4.0 * ens.rho_se[i]);
            let bp = 0.05f64.max(4.0 * ens.p_se[i]);
            ok &= dr <= br && dp <= bp;
            if dr / br > worst_rho {
                worst_rho = dr / br;
                at_rho = format!("|drho|={dr:.4} bound {br:.4} at t={:.2}", ens.mean.times[i]);
            }
            if dp / bp > worst_p {
                worst_p = dp / bp;
                at_p = format!("|dp|={dp:.4} bound {bp:.4} at t={:.2}", ens.mean.times[i]);
            }
        }
        out.check(
            ok,
            format!("alpha={alpha:+.1} eps={eps:.4}: worst {at_rho}; worst {at_p}"),
        );
    }
    out
}

fn figure_level(ide: &[((f64, f64), GridRun)], pde: &[(f64, GridRun)]) -> Outcome {
    let mut out = Outcome::new();
    let eps = 10f64.powf(-0.5);
    for (alpha, g) in pde {
        let f = &find(ide, *alpha, eps).final_state;
        let dist = l2_distance(f, &g.final_state).unwrap();
        let norm = g.final_state.l2_norm();
        out.check(
            dist < 0.25 * norm,
            format!(
                "alpha={alpha:+.1}: ||f-g||/||g|| = {:.4} (bound 0.25)",
                dist / norm
            ),
        );
        if *alpha == 0.0 {
            let mode = g.final_state.mode();
            out.check(
                (mode - 1.5).abs() <= 0.5,
                format!("alpha=+0.0: mode of g(T) = {mode:.3} (fittest trait 1.5)"),
            );
        }
    }
    out
}

/// Runs every criterion and reports whether all of them passed.
pub fn run_all() -> bool {
    let mut entries = Vec::new();
    let mut diags: Vec<(String, Diagnostics)> = Vec::new();

    let t = Instant::now();
    entries.push(report(1, "kernel identities", t, kernel_identities()));

    let t = Instant::now();
    let out = logistic(&mut diags);
    entries.push(report(2, "logistic oracle", t, out));

    let t = Instant::now();
    let cases: Vec<(f64, f64)> = ALPHAS
        .iter()
        .flat_map(|&a| epsilons().map(|e| (a, e)))
        .collect();
    let ide: Vec<((f64, f64), GridRun)> = cases
        .par_iter()
        .map(|&(a, e)| ((a, e), ide_run(&desk(ModelKind::Ide, a, e)).unwrap()))
        .collect();
    let pde: Vec<(f64, GridRun)> = ALPHAS
        .par_iter()
        .map(|&a| (a, pde_run(&desk(ModelKind::Pde, a, 1.0)).unwrap()))
        .collect();
    let pde_central: Vec<(f64, GridRun)> = ALPHAS
        .par_iter()
        .map(|&a| {
            let cfg = SimConfig {
                scheme: AdvectionScheme::Central,
                ..desk(ModelKind::Pde, a, 1.0)
            };
            (a, pde_run(&cfg).unwrap())
        })
        .collect();
    for ((a, e), run) in &ide {
        diags.push((
            format!("ide alpha={a:+.1} eps={e:.4}"),
            run.diagnostics.clone(),
        ));
    }
    for (a, run) in &pde {
        diags.push((format!("pde alpha={a:+.1}"), run.diagnostics.clone()));
    }
    for (a, run) in &pde_central {
        diags.push((
            format!("pde (central) alpha={a:+.1}"),
            run.diagnostics.clone(),
        ));
    }

    entries.push(report(
        4,
        "moment-equation residuals",
        t,
        residuals(&ide, &pde_central),
    ));

    let t = Instant::now();
    entries.push(report(
        5,
        "quasi-invariant convergence",
        t,
        convergence(&ide, &pde),
    ));

    let t = Instant::now();
    entries.push(report(
        6,
        "ABM-IDE mean-field agreement",
        t,
        mean_field(&ide),
    ));

    let t = Instant::now();
    entries.push(report(
        7,
        "figure-level agreement",
        t,
        figure_level(&ide, &pde),
    ));

    let t = Instant::now();
    entries.push(report(
        3,
        "invariants of every solver run",
        t,
        propositions(&diags),
    ));

    entries.sort_by_key(|e| e.id);
    entries.iter().for_each(print);
    println!("SKIP criterion 8: full reference-profile reproduction is run manually (see README)");

    entries.iter().all(|e| e.outcome.pass)
}
