use std::fs;
use std::path::Path;
use std::time::Instant;

use rayon::prelude::*;

use phenokin::io::{
    alpha_tag, convergence_csv, ensemble_csv, epsilon_tag, fmt_num, manifest_text, moments_csv,
    moments_file_name, orders_csv, snapshot_csv, snapshot_file_name, write_atomic,
};
use phenokin::{
    abm_run, ide_run, pde_run, ConvergenceReport, DistributionState, EnsembleSeries, GuardValues,
    ModelKind, MomentSeries, Result, SimConfig, SimError,
};

/// Collects output files and manifest entries, then writes them together.
#[derive(Default)]
struct Bundle {
    files: Vec<(String, String)>,
    entries: Vec<(String, String)>,
}

impl Bundle {
    fn file(&mut self, name: String, contents: String) {
        self.files.push((name, contents));
    }

    fn entry(&mut self, key: impl Into<String>, value: impl Into<String>) {
        self.entries.push((key.into(), value.into()));
    }

    fn config(&mut self, cfg: &SimConfig) {
        self.entry("version", phenokin::VERSION);
        for (k, v) in cfg.echo() {
            self.entry(k, v);
        }
        self.entry("moment_stride", cfg.moment_stride.to_string());
        self.entry("scheme", format!("{:?}", cfg.scheme).to_lowercase());
        let times: Vec<String> = cfg.snapshot_times.iter().map(f64::to_string).collect();
        self.entry("snapshot_times", times.join(","));
    }

    fn guards(&mut self, prefix: &str, g: &GuardValues) {
        for (name, value) in [
            ("abm_step", g.abm_step),
            ("ide_step", g.ide_step),
            ("mu_dt", g.mu_dt),
            ("pde_cfl", g.pde_cfl),
            ("kernel_mass_defect", g.kernel_mass_defect),
        ] {
            self.entry(format!("guard.{prefix}{name}"), fmt_num(value));
        }
    }

    fn write(mut self, out_dir: &Path) -> Result<()> {
        fs::create_dir_all(out_dir)?;
        let names: Vec<&str> = self.files.iter().map(|(n, _)| n.as_str()).collect();
        let listing = names.join(",");
        for (name, contents) in &self.files {
            write_atomic(&out_dir.join(name), contents)?;
        }
        self.entries.push(("outputs".into(), listing));
        write_atomic(&out_dir.join("manifest.txt"), &manifest_text(&self.entries))
    }
}

/// Moments and snapshots of one finished model run.
struct Output {
    series: MomentSeries,
    snapshots: Vec<DistributionState>,
    final_state: DistributionState,
    seconds: f64,
    /// Invariant violations tolerated in lenient mode, as `(check, detail)`.
    warnings: Vec<(String, String)>,
}

fn execute(cfg: &SimConfig, lenient: bool) -> Result<Output> {
    let start = Instant::now();
    let mut warnings = Vec::new();
    let (series, snapshots, final_state) = match cfg.model {
        ModelKind::Abm => {
            let run = abm_run(cfg)?;
            let last = run.population.histogram(cfg.grid()?);
            (run.series, run.histograms, last)
        }
        ModelKind::Ide | ModelKind::Pde => {
            let run = if cfg.model == ModelKind::Ide {
                ide_run(cfg)?
            } else {
                pde_run(cfg)?
            };
            for err in run.diagnostics.violations() {
                match err {
                    SimError::Invariant { check, detail } if lenient => {
                        warnings.push((check.replace(' ', "_"), detail))
                    }
                    other => return Err(other),
                }
            }
            (run.series, run.snapshots, run.final_state)
        }
    };
    Ok(Output {
        series,
        snapshots,
        final_state,
        seconds: start.elapsed().as_secs_f64(),
        warnings,
    })
}

fn report_warnings(bundle: &mut Bundle, prefix: &str, out: &Output) {
    for (check, detail) in &out.warnings {
        eprintln!("warning: {prefix}{check}: {detail}");
        bundle.entry(format!("warning.{prefix}{check}"), detail.clone());
    }
}

pub fn run(cfg: &SimConfig, out_dir: &Path, lenient: bool) -> Result<()> {
    let guards = cfg.validate()?;
    let out = execute(cfg, lenient)?;

    let mut bundle = Bundle::default();
    bundle.config(cfg);
    bundle.entry("model", cfg.model.tag());
    bundle.guards("", &guards);
    bundle.entry("wall_clock_seconds", format!("{:.3}", out.seconds));
    report_warnings(&mut bundle, "", &out);
    bundle.file(
        moments_file_name(cfg.model, cfg.alpha, cfg.epsilon),
        moments_csv(&out.series),
    );
    for s in &out.snapshots {
        bundle.file(
            snapshot_file_name(cfg.model, cfg.alpha, cfg.epsilon, s.time),
            snapshot_csv(s),
        );
    }
    bundle.write(out_dir)
}

pub struct ComparePlan {
    pub alphas: Vec<f64>,
    pub epsilons: Vec<f64>,
    pub seeds: Vec<u64>,
    pub jobs: Option<usize>,
    pub lenient: bool,
}

#[derive(Clone, Copy)]
struct Job {
    model: ModelKind,
    alpha: f64,
    epsilon: f64,
    seed: u64,
}

impl Job {
    fn config(&self, base: &SimConfig) -> SimConfig {
        SimConfig {
            model: self.model,
            alpha: self.alpha,
            epsilon: self.epsilon,
            seed: self.seed,
            ..base.clone()
        }
    }
}

fn mean_state(states: &[&DistributionState]) -> DistributionState {
    let mut mean = states[0].clone();
    for s in &states[1..] {
        for (m, v) in mean.values.iter_mut().zip(&s.values) {
            *m += v;
        }
    }
    let n = states.len() as f64;
    mean.values.iter_mut().for_each(|m| *m /= n);
    mean
}

pub fn compare(base: &SimConfig, plan: &ComparePlan, out_dir: &Path) -> Result<()> {
    if plan.alphas.is_empty() || plan.epsilons.is_empty() {
        return Err(SimError::usage(
            "compare needs at least one alpha and one epsilon",
        ));
    }
    let mut epsilons = plan.epsilons.clone();
    epsilons.sort_by(|a, b| b.total_cmp(a));

    let mut jobs = Vec::new();
    for &alpha in &plan.alphas {
        jobs.push(Job {
            model: ModelKind::Pde,
            alpha,
            epsilon: epsilons[0],
            seed: base.seed,
        });
        for &epsilon in &epsilons {
            jobs.push(Job {
                model: ModelKind::Ide,
                alpha,
                epsilon,
                seed: base.seed,
            });
            for &seed in &plan.seeds {
                jobs.push(Job {
                    model: ModelKind::Abm,
                    alpha,
                    epsilon,
                    seed,
                });
            }
        }
    }

    let mut bundle = Bundle::default();
    bundle.config(base);
    for job in &jobs {
        if job.model == ModelKind::Abm && job.seed != plan.seeds[0] {
            continue;
        }
        let guards = job.config(base).validate()?;
        let prefix = format!(
            "{}_{}_{}.",
            job.model.tag(),
            alpha_tag(job.alpha),
            epsilon_tag(job.model, job.epsilon)
        );
        bundle.guards(&prefix, &guards);
    }

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(plan.jobs.unwrap_or(0))
        .build()
        .map_err(|e| SimError::usage(format!("cannot start worker pool: {e}")))?;
    let outputs: Vec<Output> = pool.install(|| {
        jobs.par_iter()
            .map(|j| execute(&j.config(base), plan.lenient))
            .collect::<Result<_>>()
    })?;

    let seeds: Vec<String> = plan.seeds.iter().map(u64::to_string).collect();
    bundle.entry("seeds", seeds.join(","));
    bundle.entry(
        "models",
        if plan.seeds.is_empty() {
            "pde,ide"
        } else {
            "pde,ide,abm"
        },
    );
    if plan.seeds.is_empty() {
        eprintln!("note: no seeds requested, deterministic-only comparison");
        bundle.entry("note", "deterministic-only comparison");
    }

    let find = |model: ModelKind, alpha: f64, epsilon: f64| -> Vec<(&Job, &Output)> {
        jobs.iter()
            .zip(&outputs)
            .filter(|(j, _)| {
                j.model == model
                    && j.alpha == alpha
                    && (model == ModelKind::Pde || j.epsilon == epsilon)
            })
            .collect()
    };

    for (job, out) in jobs.iter().zip(&outputs) {
        let stem = format!(
            "{}_{}_{}",
            job.model.tag(),
            alpha_tag(job.alpha),
            epsilon_tag(job.model, job.epsilon)
        );
        if job.model == ModelKind::Abm {
            bundle.entry(
                format!("wall_clock.{stem}_s{}", job.seed),
                format!("{:.3}", out.seconds),
            );
            bundle.file(
                format!("{stem}_s{}_moments.csv", job.seed),
                moments_csv(&out.series),
            );
            continue;
        }
        bundle.entry(format!("wall_clock.{stem}"), format!("{:.3}", out.seconds));
        report_warnings(&mut bundle, &format!("{stem}."), out);
        bundle.file(
            moments_file_name(job.model, job.alpha, job.epsilon),
            moments_csv(&out.series),
        );
        for s in &out.snapshots {
            bundle.file(
                snapshot_file_name(job.model, job.alpha, job.epsilon, s.time),
                snapshot_csv(s),
            );
        }
    }

    for &alpha in &plan.alphas {
        let pde = find(ModelKind::Pde, alpha, 0.0)[0].1;
        let mut ide_runs = Vec::new();
        let mut abm_rows =
            String::from("epsilon,rho_diff_final,p_diff_final,rho_se_final,p_se_final\n");
        for &epsilon in &epsilons {
            let ide = find(ModelKind::Ide, alpha, epsilon)[0].1;
            ide_runs.push((ide.series.clone(), ide.final_state.clone()));

            let abm = find(ModelKind::Abm, alpha, epsilon);
            if abm.is_empty() {
                continue;
            }
            let series: Vec<MomentSeries> = abm.iter().map(|(_, o)| o.series.clone()).collect();
            let ensemble = EnsembleSeries::from_runs(&series)?;
            bundle.file(
                moments_file_name(ModelKind::Abm, alpha, epsilon),
                moments_csv(&ensemble.mean),
            );
            let stem = moments_file_name(ModelKind::Abm, alpha, epsilon);
            bundle.file(
                stem.replace("_moments.csv", "_ensemble.csv"),
                ensemble_csv(&ensemble),
            );
            for (k, &t) in base.snapshot_times.iter().enumerate() {
                let states: Vec<&DistributionState> =
                    abm.iter().filter_map(|(_, o)| o.snapshots.get(k)).collect();
                if !states.is_empty() {
                    bundle.file(
                        snapshot_file_name(ModelKind::Abm, alpha, epsilon, t),
                        snapshot_csv(&mean_state(&states)),
                    );
                }
            }
            let last = ensemble.mean.len() - 1;
            let i_last = ide.series.len() - 1;
            abm_rows.push_str(&format!(
                "{},{},{},{},{}\n",
                fmt_num(epsilon),
                fmt_num(ensemble.mean.rho[last] - ide.series.rho[i_last]),
                fmt_num(ensemble.mean.p[last] - ide.series.p[i_last]),
                fmt_num(ensemble.rho_se[last]),
                fmt_num(ensemble.p_se[last]),
            ));
        }
        let report = ConvergenceReport::from_runs(
            alpha,
            &epsilons,
            &(pde.series.clone(), pde.final_state.clone()),
            &ide_runs,
        )?;
        let tag = alpha_tag(alpha);
        bundle.file(format!("convergence_{tag}.csv"), convergence_csv(&report));
        bundle.file(format!("orders_{tag}.csv"), orders_csv(&report));
        if !plan.seeds.is_empty() {
            bundle.file(format!("abm_vs_ide_{tag}.csv"), abm_rows);
        }
    }
    bundle.write(out_dir)
}
