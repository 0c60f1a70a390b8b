use std::path::{Path, PathBuf};
use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::config::{ExperimentConfig, Mode};
use super::plot::{line_chart, Series};
use super::trace::{RunTrace, TraceRow};
use crate::branch_prune::{optimize_global, BranchPruneConfig, GlobalResult};
use crate::error::{invalid, Error, Result};
use crate::lipschitz::{LipschitzConfig, ParamVector};
use crate::models::{self, MlpSpec};
use crate::solvers::{Solver, SolverConfig, SolverKind};
use crate::testbed::{self, Dataset};

/// Ordered `key = value` run summary.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Summary {
    entries: Vec<(String, String)>,
}

impl Summary {
    pub fn insert(&mut self, key: &str, value: impl ToString) {
        let value = value.to_string();
        match self.entries.iter_mut().find(|(k, _)| k == key) {
            Some(e) => e.1 = value,
            None => self.entries.push((key.to_string(), value)),
        }
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries.iter().find(|(k, _)| k == key).map(|(_, v)| v.as_str())
    }

    pub fn get_f64(&self, key: &str) -> Option<f64> {
        self.get(key).and_then(|v| v.parse().ok())
    }

    pub fn entries(&self) -> &[(String, String)] {
        &self.entries
    }

    pub fn to_text(&self) -> String {
        self.entries.iter().map(|(k, v)| format!("{k} = {v}\n")).collect()
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut s = Summary::default();
        for line in text.lines().filter(|l| !l.trim().is_empty()) {
            let (k, v) = line
                .split_once(" = ")
                .ok_or_else(|| invalid(format!("summary line without ` = `: {line:?}")))?;
            s.insert(k, v);
        }
        Ok(s)
    }
}

/// Everything a run produced, before or after writing it out.
#[derive(Debug, Clone)]
pub struct RunOutput {
    pub config: ExperimentConfig,
    pub trace: RunTrace,
    pub summary: Summary,
    /// Full-dataset objective after each training epoch.
    pub epoch_objectives: Vec<f64>,
    pub final_params: Option<ParamVector>,
    pub global: Option<GlobalResult>,
}

impl RunOutput {
    pub fn final_objective(&self) -> f64 {
        self.summary.get_f64("final_objective").unwrap_or(f64::NAN)
    }

    pub fn best_objective(&self) -> f64 {
        self.summary.get_f64("best_objective").unwrap_or(f64::NAN)
    }

    pub fn accuracy(&self) -> Option<f64> {
        self.summary.get_f64("train_accuracy")
    }
}

fn column_min(trace: &RunTrace, col: &str) -> f64 {
    trace.column(col).unwrap_or_default().into_iter().fold(f64::INFINITY, f64::min)
}

/// Default output directory: `--out`, else `$BPGRAD_OUT/<run>`, else `bpgrad-out/<run>`.
pub fn resolve_out_dir(cfg: &ExperimentConfig) -> PathBuf {
    if let Some(out) = &cfg.out {
        return out.clone();
    }
    let root = std::env::var_os(super::OUT_ENV).map(PathBuf::from).unwrap_or_else(|| PathBuf::from("bpgrad-out"));
    let target = if cfg.mode == Mode::Optimize { cfg.target.clone() } else { cfg.target.clone() + "-" + cfg.solver.name() };
    root.join(format!("{}-{}-seed{}", cfg.mode.name(), target, cfg.seed))
}

/// Runs the experiment in memory.
pub fn execute(cfg: &ExperimentConfig) -> Result<RunOutput> {
    cfg.validate()?;
    match cfg.mode {
        Mode::Optimize => execute_optimize(cfg),
        Mode::Train => execute_train(cfg),
    }
}

fn execute_optimize(cfg: &ExperimentConfig) -> Result<RunOutput> {
    let started = Instant::now();
    let f = testbed::lookup(&cfg.target)?;
    let lipschitz = cfg.lipschitz.unwrap_or(f.declared_l);
    let bp = BranchPruneConfig {
        lipschitz: LipschitzConfig::new(lipschitz, 0.0, cfg.epsilon)?,
        rho_schedule: cfg.rho_schedule,
        max_inner_iters: cfg.max_inner_iters,
        max_outer_iters: cfg.max_outer_iters,
        ..BranchPruneConfig::default()
    };
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let result = optimize_global(&f, &f.domain, &bp, &mut rng)?;
    let mut trace = result.trace.clone();
    if !cfg.timing {
        trace.strip_timing();
    }

    let mut s = Summary::default();
    s.insert("mode", "optimize");
    s.insert("target", &cfg.target);
    s.insert("seed", cfg.seed);
    s.insert("L", lipschitz);
    s.insert("eps", cfg.epsilon);
    s.insert("rho_schedule", cfg.rho_schedule.name());
    s.insert("minimum", result.minimum);
    s.insert(
        "minimizer",
        result.minimizer.iter().map(|v| v.to_string()).collect::<Vec<_>>().join(" "),
    );
    s.insert("samples", result.history.len());
    s.insert("phases", result.phases.len());
    s.insert("rho_final", result.rho_final);
    s.insert("terminated_by", result.terminated_by.name());
    s.insert("final_objective", result.minimum);
    s.insert("best_objective", result.minimum);
    s.insert("min_f", column_min(&trace, "f"));
    s.insert("min_running_min", column_min(&trace, "running_min"));
    s.insert("wall_ms", if cfg.timing { started.elapsed().as_secs_f64() * 1e3 } else { 0.0 });

    Ok(RunOutput {
        config: cfg.clone(),
        trace,
        summary: s,
        epoch_objectives: Vec::new(),
        final_params: Some(result.minimizer.clone()),
        global: Some(result),
    })
}

fn load_dataset(cfg: &ExperimentConfig) -> Result<Dataset> {
    match cfg.target.as_str() {
        "blobs" => testbed::make_blobs(cfg.classes, cfg.per_class, cfg.d_in, cfg.spread, cfg.seed),
        "idx" => testbed::load_idx(
            cfg.idx_images.as_deref().expect("validated"),
            cfg.idx_labels.as_deref().expect("validated"),
            cfg.classes,
        ),
        other => Err(Error::Config(format!("unknown dataset `{other}`"))),
    }
}

/// The solver configuration a training run uses.
pub fn solver_config(cfg: &ExperimentConfig, total_iters: usize) -> SolverConfig {
    let mut sc = SolverConfig::defaults_for(cfg.solver);
    if let Some(l) = cfg.lipschitz {
        sc.lipschitz = l;
    }
    sc.mu = cfg.mu;
    if let Some(lr) = cfg.learning_rate {
        sc.learning_rate = lr;
    }
    sc.max_phases = cfg.phases;
    sc.evals_per_phase = total_iters.div_ceil(cfg.phases).max(1);
    sc.epsilon = cfg.epsilon;
    sc.seed = cfg.seed;
    sc
}

fn execute_train(cfg: &ExperimentConfig) -> Result<RunOutput> {
    let started = Instant::now();
    let data = load_dataset(cfg)?;
    let mut widths = vec![data.d_in];
    widths.extend(&cfg.hidden);
    widths.push(data.classes);
    let spec = MlpSpec::new(widths, cfg.activation, cfg.weight_decay)?;
    let stream = testbed::batches(&data, cfg.batch, cfg.seed)?;
    let per_epoch = stream.batches_per_epoch();
    let total = per_epoch * cfg.epochs;
    let sc = solver_config(cfg, total);
    let mut solver = Solver::new(sc.clone(), spec.param_count())?;

    let mut x = spec.init_params(cfg.seed);
    let mut trace = RunTrace::new(Some(per_epoch));
    let mut epoch_objectives = Vec::with_capacity(cfg.epochs);
    let mut terminated = "completed";

    'epochs: for epoch in 0..cfg.epochs {
        for batch in stream.epoch(epoch) {
            let (f, g) = models::value_and_gradient(&spec, &x, &batch)?;
            let out = solver.step(&x, f, &g)?;
            trace.push(TraceRow {
                iter: solver.state().iter,
                phase: out.phase,
                rho: out.rho,
                f,
                running_min: solver.state().running_min,
                eta: out.eta,
                lhs: out.condition.lhs,
                rhs: out.condition.rhs,
                satisfied: out.condition.satisfied,
                wall_ms: if cfg.timing { started.elapsed().as_secs_f64() * 1e3 } else { 0.0 },
            });
            x = out.next;
            if out.converged {
                terminated = "converged";
                epoch_objectives.push(models::objective(&spec, &x, &data)?);
                break 'epochs;
            }
        }
        let full = models::objective(&spec, &x, &data)?;
        if !full.is_finite() {
            return Err(Error::NumericFailure { iter: solver.state().iter, detail: format!("training objective is {full}") });
        }
        epoch_objectives.push(full);
    }

    let final_objective = *epoch_objectives.last().expect("at least one epoch");
    let best_objective = epoch_objectives.iter().copied().fold(f64::INFINITY, f64::min);
    let acc = models::accuracy(&spec, &x, &data)?;

    let mut s = Summary::default();
    s.insert("mode", "train");
    s.insert("target", &cfg.target);
    s.insert("solver", cfg.solver);
    s.insert("seed", cfg.seed);
    if cfg.solver == SolverKind::Bpgrad {
        s.insert("L", sc.lipschitz);
    } else {
        s.insert("lr", sc.learning_rate);
    }
    s.insert("mu", sc.mu);
    s.insert("epochs", cfg.epochs);
    s.insert("batch", cfg.batch);
    s.insert("iters_per_epoch", per_epoch);
    s.insert("iterations", trace.len());
    s.insert("terminated_by", terminated);
    s.insert("final_objective", final_objective);
    s.insert("best_objective", best_objective);
    s.insert("train_accuracy", acc);
    s.insert("min_f", column_min(&trace, "f"));
    s.insert("min_running_min", column_min(&trace, "running_min"));
    let sat = trace.rows.iter().filter(|r| r.satisfied).count() as f64 / trace.len().max(1) as f64;
    s.insert("condition_satisfied_fraction", sat);
    s.insert("wall_ms", if cfg.timing { started.elapsed().as_secs_f64() * 1e3 } else { 0.0 });

    Ok(RunOutput {
        config: cfg.clone(),
        trace,
        summary: s,
        epoch_objectives,
        final_params: Some(x),
        global: None,
    })
}

pub fn write_run_files(out: &RunOutput, dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    out.trace.write_csv(&dir.join("trace.csv"))?;
    std::fs::write(dir.join("summary.txt"), out.summary.to_text())?;
    std::fs::write(dir.join("config.txt"), out.config.to_text())?;

    let rows = &out.trace.rows;
    let pts = |pick: fn(&TraceRow) -> f64| rows.iter().map(|r| (r.iter as f64, pick(r))).collect::<Vec<_>>();
    std::fs::write(
        dir.join("objective.svg"),
        line_chart(
            "objective",
            "iteration",
            "f",
            &[Series { label: "f", points: pts(|r| r.f) }, Series { label: "running min", points: pts(|r| r.running_min) }],
        ),
    )?;
    std::fs::write(
        dir.join("eta.svg"),
        line_chart("step size", "iteration", "eta", &[Series { label: "eta", points: pts(|r| r.eta) }]),
    )?;
    std::fs::write(
        dir.join("condition.svg"),
        line_chart(
            "sampling condition",
            "iteration",
            "value",
            &[Series { label: "LHS", points: pts(|r| r.lhs) }, Series { label: "RHS", points: pts(|r| r.rhs) }],
        ),
    )?;
    Ok(())
}

/// Runs the experiment and writes `trace.csv`, `summary.txt`, `config.txt`
/// and SVG plots into the resolved output directory.
pub fn run(cfg: &ExperimentConfig) -> Result<(RunOutput, PathBuf)> {
    let out = execute(cfg)?;
    let dir = resolve_out_dir(cfg);
    write_run_files(&out, &dir)?;
    Ok((out, dir))
}

#[derive(Debug, Clone, PartialEq)]
pub struct ComparisonRow {
    pub label: String,
    pub solver: String,
    pub seed: u64,
    pub final_objective: f64,
    pub best_objective: f64,
    pub accuracy: Option<f64>,
    pub wall_ms: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ComparisonTable {
    pub target: String,
    pub rows: Vec<ComparisonRow>,
}

impl ComparisonTable {
    pub fn to_csv_string(&self) -> String {
        let mut s = String::from("label,solver,seed,final_objective,best_objective,accuracy,wall_ms\n");
        for r in &self.rows {
            s.push_str(&format!(
                "{},{},{},{},{},{},{}\n",
                r.label,
                r.solver,
                r.seed,
                r.final_objective,
                r.best_objective,
                r.accuracy.map(|a| a.to_string()).unwrap_or_default(),
                r.wall_ms
            ));
        }
        s
    }

    pub fn to_pretty(&self) -> String {
        let mut s = format!(
            "target: {}\n{:<28} {:>6} {:>14} {:>14} {:>9} {:>10}\n",
            self.target, "solver", "seed", "final", "best", "accuracy", "wall_ms"
        );
        for r in &self.rows {
            s.push_str(&format!(
                "{:<28} {:>6} {:>14.6e} {:>14.6e} {:>9} {:>10.1}\n",
                r.label,
                r.seed,
                r.final_objective,
                r.best_objective,
                r.accuracy.map(|a| format!("{a:.4}")).unwrap_or_else(|| "-".into()),
                r.wall_ms
            ));
        }
        s
    }
}

fn row_label(cfg: &ExperimentConfig) -> String {
    match cfg.mode {
        Mode::Optimize => format!("branch-prune L={}", cfg.lipschitz.map(|l| l.to_string()).unwrap_or_else(|| "declared".into())),
        Mode::Train => {
            let sc = solver_config(cfg, 1);
            match cfg.solver {
                SolverKind::Bpgrad => format!("bpgrad L={} mu={}", sc.lipschitz, sc.mu),
                SolverKind::SgdMomentum => format!("sgd lr={} mu={}", sc.learning_rate, sc.mu),
                k => format!("{k} lr={}", sc.learning_rate),
            }
        }
    }
}

/// Runs every config (in parallel) and tabulates them, sorted by final objective.
pub fn compare(configs: &[ExperimentConfig]) -> Result<(ComparisonTable, Vec<RunOutput>)> {
    let first = configs.first().ok_or_else(|| invalid("compare needs at least one config"))?;
    for c in configs {
        if c.target != first.target || c.mode != first.mode || c.seed != first.seed {
            return Err(invalid(format!(
                "compared runs must share mode, target and seed: {} {} seed {} vs {} {} seed {}",
                first.mode.name(),
                first.target,
                first.seed,
                c.mode.name(),
                c.target,
                c.seed
            )));
        }
    }
    let outputs: Vec<Result<RunOutput>> = std::thread::scope(|scope| {
        let handles: Vec<_> = configs.iter().map(|c| scope.spawn(move || execute(c))).collect();
        handles.into_iter().map(|h| h.join().expect("run thread panicked")).collect()
    });
    let outputs: Vec<RunOutput> = outputs.into_iter().collect::<Result<_>>()?;

    let mut rows: Vec<ComparisonRow> = outputs
        .iter()
        .map(|o| ComparisonRow {
            label: row_label(&o.config),
            solver: o.config.solver.name().to_string(),
            seed: o.config.seed,
            final_objective: o.final_objective(),
            best_objective: o.best_objective(),
            accuracy: o.accuracy(),
            wall_ms: o.summary.get_f64("wall_ms").unwrap_or(0.0),
        })
        .collect();
    rows.sort_by(|a, b| a.final_objective.total_cmp(&b.final_objective));
    Ok((ComparisonTable { target: first.target.clone(), rows }, outputs))
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpochDiagnostics {
    pub epoch: usize,
    pub eta_median: f64,
    pub satisfied_fraction: f64,
    pub f_mean: f64,
    pub f_min: f64,
    pub f_max: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DiagnosticsReport {
    pub epochs: Vec<EpochDiagnostics>,
    /// Fraction of all steps satisfying the sampling condition.
    pub satisfied_fraction: f64,
}

impl DiagnosticsReport {
    pub fn first_eta_median(&self) -> f64 {
        self.epochs.first().map_or(f64::NAN, |e| e.eta_median)
    }

    pub fn last_eta_median(&self) -> f64 {
        self.epochs.last().map_or(f64::NAN, |e| e.eta_median)
    }

    pub fn to_text(&self) -> String {
        let mut s = format!("satisfied_fraction = {}\nepochs = {}\n", self.satisfied_fraction, self.epochs.len());
        for e in &self.epochs {
            s.push_str(&format!(
                "epoch.{n}.eta_median = {}\nepoch.{n}.satisfied_fraction = {}\nepoch.{n}.f_mean = {}\nepoch.{n}.f_min = {}\nepoch.{n}.f_max = {}\n",
                e.eta_median,
                e.satisfied_fraction,
                e.f_mean,
                e.f_min,
                e.f_max,
                n = e.epoch
            ));
        }
        s
    }
}

pub fn median(values: &mut [f64]) -> f64 {
    if values.is_empty() {
        return f64::NAN;
    }
    values.sort_by(f64::total_cmp);
    let n = values.len();
    if n % 2 == 1 {
        values[n / 2]
    } else {
        0.5 * (values[n / 2 - 1] + values[n / 2])
    }
}

/// Per-epoch step-size medians, condition satisfaction and objective summary.
///
/// Rows are grouped by the trace's `iters_per_epoch`; a trace without it is
/// treated as one epoch.
pub fn diagnostics(trace: &RunTrace) -> Result<DiagnosticsReport> {
    if trace.is_empty() {
        return Err(invalid("diagnostics need a nonempty trace"));
    }
    let per = trace.iters_per_epoch.unwrap_or(trace.len()).max(1);
    let epochs = trace
        .rows
        .chunks(per)
        .enumerate()
        .map(|(i, rows)| {
            let mut etas: Vec<f64> = rows.iter().map(|r| r.eta).collect();
            let fs = rows.iter().map(|r| r.f);
            EpochDiagnostics {
                epoch: i + 1,
                eta_median: median(&mut etas),
                satisfied_fraction: rows.iter().filter(|r| r.satisfied).count() as f64 / rows.len() as f64,
                f_mean: fs.clone().sum::<f64>() / rows.len() as f64,
                f_min: fs.clone().fold(f64::INFINITY, f64::min),
                f_max: fs.fold(f64::NEG_INFINITY, f64::max),
            }
        })
        .collect();
    let satisfied_fraction = trace.rows.iter().filter(|r| r.satisfied).count() as f64 / trace.len() as f64;
    Ok(DiagnosticsReport { epochs, satisfied_fraction })
}

/// Writes `diagnostics.txt` and per-diagnostic SVG plots into `dir`.
pub fn write_diagnostics(report: &DiagnosticsReport, dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    std::fs::write(dir.join("diagnostics.txt"), report.to_text())?;
    let per = |pick: fn(&EpochDiagnostics) -> f64| {
        report.epochs.iter().map(|e| (e.epoch as f64, pick(e))).collect::<Vec<_>>()
    };
    std::fs::write(
        dir.join("eta_median.svg"),
        line_chart("median step size per epoch", "epoch", "eta", &[Series { label: "median eta", points: per(|e| e.eta_median) }]),
    )?;
    std::fs::write(
        dir.join("satisfaction.svg"),
        line_chart(
            "sampling condition satisfied",
            "epoch",
            "fraction",
            &[Series { label: "satisfied", points: per(|e| e.satisfied_fraction) }],
        ),
    )?;
    std::fs::write(
        dir.join("objective_epoch.svg"),
        line_chart(
            "mini-batch objective per epoch",
            "epoch",
            "f",
            &[
                Series { label: "mean", points: per(|e| e.f_mean) },
                Series { label: "min", points: per(|e| e.f_min) },
                Series { label: "max", points: per(|e| e.f_max) },
            ],
        ),
    )?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(iter: usize, eta: f64, satisfied: bool) -> TraceRow {
        TraceRow {
            iter,
            phase: 1,
            rho: 0.0,
            f: eta * 10.0,
            running_min: 0.0,
            eta,
            lhs: 0.0,
            rhs: 0.0,
            satisfied,
            wall_ms: 0.0,
        }
    }

    #[test]
    fn median_even_and_odd() {
        assert_eq!(median(&mut [3.0, 1.0, 2.0]), 2.0);
        assert_eq!(median(&mut [4.0, 1.0, 2.0, 3.0]), 2.5);
        assert!(median(&mut []).is_nan());
    }

    #[test]
    fn diagnostics_all_satisfied() {
        let t = RunTrace { rows: (1..=6).map(|i| row(i, 1.0 / i as f64, true)).collect(), iters_per_epoch: Some(3) };
        let d = diagnostics(&t).unwrap();
        assert_eq!(d.satisfied_fraction, 1.0);
        assert_eq!(d.epochs.len(), 2);
        assert_eq!(d.first_eta_median(), 0.5);
        assert_eq!(d.last_eta_median(), 0.2);
        assert!(diagnostics(&RunTrace::default()).is_err());
    }

    #[test]
    fn summary_text_round_trip() {
        let mut s = Summary::default();
        s.insert("a", 1.5);
        s.insert("minimizer", "0.1 0.2");
        s.insert("a", 2);
        assert_eq!(Summary::parse(&s.to_text()).unwrap(), s);
        assert_eq!(s.get_f64("a"), Some(2.0));
    }

    #[test]
    fn compare_rejects_mixed_targets() {
        let a = ExperimentConfig::optimize("abs1d");
        let b = ExperimentConfig::optimize("shekel1d");
        assert!(compare(&[a, b]).is_err());
        assert!(compare(&[]).is_err());
    }
}
