//! `vopi` — train, evaluate, and inspect value-oriented prediction-interval
//! forecasters against the two-timescale VPP dispatch environment.

use std::path::PathBuf;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand};

use vopi::baselines::BaselineKind;
use vopi::data::{generate_synthetic, SyntheticSpec};
use vopi::dispatch::{monetary_score, settle_deviation, solve_day_ahead, VppConfig};
use vopi::harness::{
    evaluate_run, load_artifacts, render_summary_markdown, sweep, train, DataSource, EvalOutput,
    MethodReport, RunConfig, SweepAxis,
};
use vopi::metrics::EvaluationReport;
use vopi::qr::{PredictionInterval, ProportionPair};

#[derive(Parser)]
#[command(name = "vopi", version, about = "Value-oriented PI forecasting for VPP dispatch")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic wind dataset CSV.
    GenerateData(GenerateDataArgs),
    /// Train the proposed forecaster plus the enabled baselines.
    Train(ConfigArgs),
    /// Evaluate previously trained artifacts on the test partition.
    Evaluate(ConfigArgs),
    /// Train and evaluate across a list of settings.
    Sweep(SweepArgs),
    /// One-shot day-ahead solve and optional settlement for a given
    /// interval and load (debugging aid).
    Dispatch(DispatchArgs),
    /// Re-render the summary tables from a run directory's eval CSVs.
    Report(ReportArgs),
}

#[derive(Args)]
struct GenerateDataArgs {
    /// Number of hourly samples.
    #[arg(long, default_value_t = 8760)]
    n: usize,
    /// Wind capacity, MW.
    #[arg(long, default_value_t = 30.0)]
    capacity: f64,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Log-scale sigma of the multiplicative power noise.
    #[arg(long, default_value_t = 0.35)]
    noise_sigma: f64,
    /// Mean demand, MW.
    #[arg(long, default_value_t = 50.0)]
    load_mean: f64,
    /// Relative amplitude of the daily demand sinusoid.
    #[arg(long, default_value_t = 0.2)]
    load_swing: f64,
    /// Output CSV path.
    #[arg(long)]
    out: PathBuf,
}

/// Config-file plus per-key override flags shared by train/evaluate/sweep.
#[derive(Args, Clone)]
struct ConfigArgs {
    /// TOML run configuration; built-in defaults apply when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    ncp: Option<f64>,
    #[arg(long)]
    actions_exponent: Option<u32>,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    batch_size: Option<usize>,
    #[arg(long)]
    qr_learning_rate: Option<f64>,
    #[arg(long)]
    agent_learning_rate: Option<f64>,
    /// Hidden widths of the quantile nets, comma separated.
    #[arg(long, value_delimiter = ',')]
    qr_hidden: Option<Vec<usize>>,
    /// Hidden widths of the agent trunk, comma separated.
    #[arg(long, value_delimiter = ',')]
    agent_hidden: Option<Vec<usize>>,
    #[arg(long)]
    buffer_capacity: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Repetitions with derived seeds (sweeps average over them).
    #[arg(long)]
    n_seeds: Option<usize>,
    #[arg(long)]
    train_fraction: Option<f64>,
    #[arg(long)]
    naive_window: Option<usize>,
    /// Baselines to run: central, naive, deterministic (comma separated,
    /// empty string for none).
    #[arg(long, value_delimiter = ',')]
    baselines: Option<Vec<String>>,
    /// Use this CSV dataset instead of the configured source.
    #[arg(long)]
    data_csv: Option<PathBuf>,
    /// Wind capacity of the CSV dataset, MW.
    #[arg(long)]
    data_capacity: Option<f64>,
    /// Use the synthetic source with this sample count.
    #[arg(long)]
    synthetic_n: Option<usize>,
    /// Rescale dataset power linearly to this capacity, MW.
    #[arg(long)]
    capacity_override: Option<f64>,
    /// Exploration probability at the first training step.
    #[arg(long)]
    epsilon_start: Option<f64>,
    /// Exploration probability after the decay phase.
    #[arg(long)]
    epsilon_end: Option<f64>,
    /// Fraction of training steps over which epsilon decays.
    #[arg(long)]
    epsilon_decay_fraction: Option<f64>,
    /// Output directory (relative paths root at $VOPI_OUT_ROOT).
    #[arg(long)]
    out_dir: Option<PathBuf>,
}

impl ConfigArgs {
    fn resolve(&self) -> anyhow::Result<RunConfig> {
        let mut config = match &self.config {
            Some(path) => RunConfig::from_toml_path(path)
                .with_context(|| format!("loading config {}", path.display()))?,
            None => RunConfig::default(),
        };
        macro_rules! set {
            ($field:ident) => {
                if let Some(v) = &self.$field {
                    config.$field = v.clone();
                }
            };
        }
        set!(ncp);
        set!(actions_exponent);
        set!(epochs);
        set!(batch_size);
        set!(qr_learning_rate);
        set!(agent_learning_rate);
        set!(qr_hidden);
        set!(agent_hidden);
        set!(buffer_capacity);
        set!(seed);
        set!(n_seeds);
        set!(train_fraction);
        set!(naive_window);
        set!(out_dir);
        if self.capacity_override.is_some() {
            config.capacity_override = self.capacity_override;
        }
        if let Some(v) = self.epsilon_start {
            config.epsilon.start = v;
        }
        if let Some(v) = self.epsilon_end {
            config.epsilon.end = v;
        }
        if let Some(v) = self.epsilon_decay_fraction {
            config.epsilon.decay_fraction = v;
        }
        if let Some(names) = &self.baselines {
            config.baselines = names
                .iter()
                .filter(|n| !n.is_empty())
                .map(|n| parse_baseline(n))
                .collect::<anyhow::Result<Vec<_>>>()?;
        }
        if let Some(path) = &self.data_csv {
            let capacity = self
                .data_capacity
                .context("--data-csv requires --data-capacity")?;
            config.data = DataSource::Csv { path: path.clone(), capacity };
        } else if let Some(n) = self.synthetic_n {
            let mut spec = match &config.data {
                DataSource::Synthetic(spec) => spec.clone(),
                _ => SyntheticSpec::default(),
            };
            spec.n = n;
            config.data = DataSource::Synthetic(spec);
        }
        Ok(config)
    }
}

fn parse_baseline(name: &str) -> anyhow::Result<BaselineKind> {
    match name {
        "central" => Ok(BaselineKind::CentralQmlp),
        "naive" => Ok(BaselineKind::NaivePersistence),
        "deterministic" => Ok(BaselineKind::Deterministic),
        other => bail!("unknown baseline `{other}` (expected central|naive|deterministic)"),
    }
}

#[derive(Args)]
struct SweepArgs {
    #[command(flatten)]
    config: ConfigArgs,
    /// NCP values to sweep, comma separated.
    #[arg(long, value_delimiter = ',')]
    ncp_list: Option<Vec<f64>>,
    /// Wind capacities to sweep, MW, comma separated.
    #[arg(long, value_delimiter = ',')]
    capacity_list: Option<Vec<f64>>,
    /// Action-space exponents to sweep, comma separated.
    #[arg(long, value_delimiter = ',')]
    actions_exponent_list: Option<Vec<u32>>,
}

#[derive(Args)]
struct DispatchArgs {
    /// Demand, MW.
    #[arg(long)]
    load: f64,
    /// Interval lower bound, MW.
    #[arg(long)]
    lower: f64,
    /// Interval upper bound, MW.
    #[arg(long)]
    upper: f64,
    /// Realized wind power, MW; when given, the real-time settlement and
    /// the monetary score are printed too.
    #[arg(long)]
    realization: Option<f64>,
    /// Run config supplying the VPP parameters (defaults otherwise).
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Args)]
struct ReportArgs {
    /// Run directory holding eval_<method>.csv files and config.toml.
    #[arg(long)]
    run_dir: PathBuf,
}

fn main() -> anyhow::Result<()> {
    let cli = Cli::parse();
    match cli.command {
        Command::GenerateData(args) => generate_data(args),
        Command::Train(args) => run_train(args),
        Command::Evaluate(args) => run_evaluate(args),
        Command::Sweep(args) => run_sweep(args),
        Command::Dispatch(args) => run_dispatch(args),
        Command::Report(args) => run_report(args),
    }
}

fn generate_data(args: GenerateDataArgs) -> anyhow::Result<()> {
    let spec = SyntheticSpec {
        n: args.n,
        capacity: args.capacity,
        seed: args.seed,
        noise_sigma: args.noise_sigma,
        load_mean: args.load_mean,
        load_swing: args.load_swing,
    };
    let dataset = generate_synthetic(&spec)?;
    if let Some(parent) = args.out.parent() {
        if !parent.as_os_str().is_empty() {
            std::fs::create_dir_all(parent)?;
        }
    }
    dataset.write_csv(&args.out)?;
    println!(
        "wrote {} samples (capacity {} MW, seed {}) to {}",
        dataset.len(),
        args.capacity,
        args.seed,
        args.out.display()
    );
    Ok(())
}

fn print_warnings(config: &RunConfig) -> anyhow::Result<()> {
    for warning in config.validate()? {
        eprintln!("warning: {warning}");
    }
    Ok(())
}

fn run_train(args: ConfigArgs) -> anyhow::Result<()> {
    let config = args.resolve()?;
    print_warnings(&config)?;
    let out = train(&config)?;
    let last = out.log.epochs.last().expect("at least one epoch");
    println!(
        "trained {} epochs x {} samples; final avg reward {:.2} $ (avg score {:.2} $)",
        config.epochs,
        out.train_data.len(),
        last.avg_reward,
        -last.avg_reward
    );
    println!("artifacts in {}", config.resolved_out_dir().display());
    Ok(())
}

fn run_evaluate(args: ConfigArgs) -> anyhow::Result<()> {
    let config = args.resolve()?;
    print_warnings(&config)?;
    let out_dir = config.resolved_out_dir();
    let artifacts = load_artifacts(&out_dir, &config)
        .with_context(|| format!("loading artifacts from {}", out_dir.display()))?;
    let dataset = config.load_dataset()?;
    let (train_data, test_data) = dataset.split(config.train_fraction)?;
    let eval = evaluate_run(&config, &artifacts, &train_data, &test_data)?;
    print!("{}", render_summary_markdown(&eval));
    Ok(())
}

fn run_sweep(args: SweepArgs) -> anyhow::Result<()> {
    let config = args.config.resolve()?;
    print_warnings(&config)?;
    let axes: Vec<SweepAxis> = [
        args.ncp_list.map(SweepAxis::Ncp),
        args.capacity_list.map(SweepAxis::Capacity),
        args.actions_exponent_list.map(SweepAxis::ActionsExponent),
    ]
    .into_iter()
    .flatten()
    .collect();
    let [axis] = axes.try_into().map_err(|_| {
        anyhow::anyhow!("pass exactly one of --ncp-list, --capacity-list, --actions-exponent-list")
    })?;
    let output = sweep(&config, &axis)?;
    let failures = output.rows.iter().filter(|r| r.status != "ok").count();
    println!(
        "sweep finished: {} rows ({} failed settings); see {}",
        output.rows.len(),
        failures,
        config.resolved_out_dir().join("sweep.csv").display()
    );
    Ok(())
}

fn run_dispatch(args: DispatchArgs) -> anyhow::Result<()> {
    let vpp = match &args.config {
        Some(path) => RunConfig::from_toml_path(path)?.vpp,
        None => VppConfig::default(),
    };
    for warning in vpp.validate()? {
        eprintln!("warning: {warning}");
    }
    if args.lower > args.upper {
        bail!("interval lower bound {} exceeds upper bound {}", args.lower, args.upper);
    }
    let interval = PredictionInterval {
        lower: args.lower,
        upper: args.upper,
        proportions: ProportionPair::new(0.025, 0.05).expect("fixed reference proportions"),
    };
    let sol = solve_day_ahead(&vpp, &interval, args.load)?;
    println!("day-ahead:");
    println!("  x1 = {:.6} MW, x2 = {:.6} MW, p = {:.6} MW", sol.setpoints[0], sol.setpoints[1], sol.wind_schedule);
    println!("  dispatch cost     = {:.2} $", sol.da_cost);
    println!("  worst-case extra  = {:.2} $ (at w = {:.6} MW)", sol.worst_case_recourse, sol.worst_case_wind);
    if let Some(y) = args.realization {
        let rt = settle_deviation(&vpp.regulation, y - sol.wind_schedule)?;
        let ms = monetary_score(&vpp, &interval, args.load, y)?;
        println!("real-time (y = {y} MW):");
        println!("  down = [{:.6}, {:.6}] MW, up = [{:.6}, {:.6}] MW", rt.down[0], rt.down[1], rt.up[0], rt.up[1]);
        println!("  settlement cost   = {:.2} $", rt.rt_cost);
        println!("monetary score      = {:.2} $", ms.score);
    }
    Ok(())
}

fn run_report(args: ReportArgs) -> anyhow::Result<()> {
    let config_path = args.run_dir.join("config.toml");
    let config = RunConfig::from_toml_path(&config_path)
        .with_context(|| format!("reading {}", config_path.display()))?;

    // Proposed first, then baselines in their configured order.
    let mut methods = vec!["proposed".to_string()];
    methods.extend(config.baselines.iter().map(|b| b.name().to_string()));

    let mut reports = Vec::new();
    for method in methods {
        let path = args.run_dir.join(format!("eval_{method}.csv"));
        if !path.exists() {
            continue;
        }
        let samples = EvaluationReport::read_samples_csv(&path)?;
        reports.push(MethodReport {
            method,
            report: EvaluationReport::from_samples(samples, config.ncp)?,
        });
    }
    if reports.is_empty() {
        bail!("no eval_<method>.csv files in {}", args.run_dir.display());
    }
    let proposed = reports[0].report.samples.clone();
    let reductions = reports
        .iter()
        .map(|m| vopi::harness::ReductionRow {
            method: m.method.clone(),
            accumulative_reduction: m
                .report
                .samples
                .iter()
                .zip(&proposed)
                .map(|(b, p)| b.monetary - p.monetary)
                .sum(),
        })
        .collect();
    let output = EvalOutput { reports, reductions };
    let markdown = render_summary_markdown(&output);
    std::fs::write(args.run_dir.join("summary.md"), &markdown)?;
    print!("{markdown}");
    Ok(())
}
