use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context};
use bpgrad_core::harness::{self, ExperimentConfig, Mode, RunTrace};
use clap::{Args, Parser, Subcommand};

#[derive(Parser)]
#[command(name = "bpgrad", version, about = "Lipschitz branch-and-prune optimization and BPGrad training experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Global minimization of a registered benchmark function.
    Optimize(RunArgs),
    /// Train a small MLP on a synthetic or IDX dataset.
    Train(RunArgs),
    /// Run several solvers (or L values) on one target and tabulate them.
    Compare(RunArgs),
    /// Per-epoch step-size and condition diagnostics for recorded traces.
    Diagnostics(DiagArgs),
}

#[derive(Args, Clone, Default)]
struct RunArgs {
    /// `key = value` config file; flags given on the command line win.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Benchmark function (optimize).
    #[arg(long = "fn")]
    function: Option<String>,
    /// Dataset: blobs or idx (train).
    #[arg(long)]
    dataset: Option<String>,
    /// Solver; compare accepts a comma-separated list.
    #[arg(long)]
    solver: Option<String>,
    /// Lipschitz constant; compare accepts a comma-separated list.
    #[arg(long = "L", visible_alias = "lipschitz")]
    lipschitz: Option<String>,
    #[arg(long)]
    mu: Option<String>,
    #[arg(long)]
    rho_schedule: Option<String>,
    #[arg(long)]
    eps: Option<String>,
    #[arg(long)]
    epochs: Option<String>,
    #[arg(long)]
    batch: Option<String>,
    #[arg(long)]
    seed: Option<String>,
    /// Baseline learning rate.
    #[arg(long)]
    lr: Option<String>,
    #[arg(long)]
    hidden: Option<String>,
    #[arg(long)]
    activation: Option<String>,
    #[arg(long)]
    weight_decay: Option<String>,
    #[arg(long)]
    idx_images: Option<String>,
    #[arg(long)]
    idx_labels: Option<String>,
    /// Extra `key=value` settings, same keys as the config file.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
    /// Zero the wall-clock column so repeated runs are byte-identical.
    #[arg(long)]
    no_timing: bool,
    /// Output directory (default: $BPGRAD_OUT/<run> or ./bpgrad-out/<run>).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct DiagArgs {
    /// Trace CSV files; several traces are reported side by side.
    #[arg(long = "trace")]
    traces: Vec<PathBuf>,
    /// Run directory holding `trace.csv`; diagnostics are written here too.
    #[arg(long)]
    out: Option<PathBuf>,
}

impl RunArgs {
    fn pairs(&self) -> Vec<(&'static str, &str)> {
        let flags: [(&'static str, &Option<String>); 16] = [
            ("fn", &self.function),
            ("dataset", &self.dataset),
            ("solver", &self.solver),
            ("L", &self.lipschitz),
            ("mu", &self.mu),
            ("rho-schedule", &self.rho_schedule),
            ("eps", &self.eps),
            ("epochs", &self.epochs),
            ("batch", &self.batch),
            ("seed", &self.seed),
            ("lr", &self.lr),
            ("hidden", &self.hidden),
            ("activation", &self.activation),
            ("weight-decay", &self.weight_decay),
            ("idx-images", &self.idx_images),
            ("idx-labels", &self.idx_labels),
        ];
        flags.iter().filter_map(|(k, v)| v.as_deref().map(|v| (*k, v))).collect()
    }

    /// File values first, then flags. `skip` leaves list-valued keys for the caller.
    fn build(&self, mode: Mode, skip: &[&str]) -> anyhow::Result<ExperimentConfig> {
        let mut cfg = match mode {
            Mode::Optimize => ExperimentConfig::optimize("abs1d"),
            Mode::Train => ExperimentConfig::train(),
        };
        if let Some(path) = &self.config {
            cfg.apply_file(path).with_context(|| format!("reading config {}", path.display()))?;
            cfg.mode = mode;
        }
        for (k, v) in self.pairs() {
            if !skip.contains(&k) {
                cfg.set(k, v)?;
            }
        }
        for kv in &self.set {
            let (k, v) = kv.split_once('=').with_context(|| format!("--set expects KEY=VALUE, got {kv:?}"))?;
            cfg.set(k, v)?;
        }
        if self.no_timing {
            cfg.timing = false;
        }
        if let Some(out) = &self.out {
            cfg.out = Some(out.clone());
        }
        Ok(cfg)
    }
}

fn split_list(v: Option<&str>) -> Vec<String> {
    v.map(|s| s.split(',').map(|x| x.trim().to_string()).filter(|x| !x.is_empty()).collect()).unwrap_or_default()
}

fn single(args: &RunArgs, mode: Mode) -> anyhow::Result<()> {
    let cfg = args.build(mode, &[])?;
    cfg.validate()?;
    let (out, dir) = harness::run(&cfg)?;
    print!("{}", out.summary.to_text());
    println!("wrote {}", dir.display());
    Ok(())
}

fn compare(args: &RunArgs) -> anyhow::Result<()> {
    let mode = if args.function.is_some() { Mode::Optimize } else { Mode::Train };
    let base = args.build(mode, &["solver", "L"])?;
    let solvers = split_list(args.solver.as_deref());
    let ls = split_list(args.lipschitz.as_deref());
    let solvers = if solvers.is_empty() { vec![base.solver.name().to_string()] } else { solvers };

    let mut configs = Vec::new();
    for s in &solvers {
        if ls.is_empty() {
            let mut c = base.clone();
            c.set("solver", s)?;
            configs.push(c);
        }
        for l in &ls {
            let mut c = base.clone();
            c.set("solver", s)?;
            c.set("L", l)?;
            configs.push(c);
        }
    }
    for c in &configs {
        c.validate()?;
    }
    let (table, outputs) = harness::compare(&configs)?;

    let root = match &args.out {
        Some(dir) => dir.clone(),
        None => harness::experiment::resolve_out_dir(&base).with_file_name(format!(
            "compare-{}-seed{}",
            base.target, base.seed
        )),
    };
    for (i, o) in outputs.iter().enumerate() {
        let label = match o.config.lipschitz {
            Some(l) if !ls.is_empty() => format!("{:02}-{}-L{l}", i + 1, o.config.solver.name()),
            _ => format!("{:02}-{}", i + 1, o.config.solver.name()),
        };
        harness::experiment::write_run_files(o, &root.join(label))?;
    }
    std::fs::create_dir_all(&root)?;
    std::fs::write(root.join("compare.csv"), table.to_csv_string())?;
    print!("{}", table.to_pretty());
    println!("wrote {}", root.display());
    Ok(())
}

fn diagnostics(args: &DiagArgs) -> anyhow::Result<()> {
    let mut traces = args.traces.clone();
    if let Some(dir) = &args.out {
        if traces.is_empty() {
            traces.push(dir.join("trace.csv"));
        }
    }
    if traces.is_empty() {
        bail!("diagnostics needs --trace FILE or --out DIR");
    }
    for path in &traces {
        let trace = RunTrace::read_csv(path).with_context(|| format!("reading {}", path.display()))?;
        let report = harness::diagnostics(&trace)?;
        let dir = match (&args.out, traces.len()) {
            (Some(d), 1) => d.clone(),
            _ => path.parent().map(Path::to_path_buf).unwrap_or_default(),
        };
        harness::write_diagnostics(&report, &dir)?;
        println!("== {}", path.display());
        print!("{}", report.to_text());
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Optimize(a) => single(a, Mode::Optimize),
        Command::Train(a) => single(a, Mode::Train),
        Command::Compare(a) => compare(a),
        Command::Diagnostics(a) => diagnostics(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
