//! `gecover`: simulate data, compute intervals, run coverage benchmarks.

use std::fs::{self, File};
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use gecover::data::{Dataset, DgpSpec, Task};
use gecover::harness::azcheck::{run_azcheck, SIZES};
use gecover::harness::{
    compute_interval, read_records, report, run_problem, write_records, write_report, BenchConfig, RunOptions,
    RunSummary,
};
use gecover::harness::with_threads;
use gecover::inducers::{InducerKind, InducerSpec};
use gecover::losses::{LossKind, LossSpec};
use gecover::methods::MethodSpec;
use gecover::{Error, Result};

#[derive(Parser)]
#[command(name = "gecover", version, about = "Confidence intervals for the generalization error and their coverage")]
struct Cli {
    /// Increase log verbosity (-v info, -vv debug).
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Draw a dataset from a data-generating process and write it as CSV.
    Simulate(SimulateArgs),
    /// Compute one interval on a CSV dataset.
    Ci(CiArgs),
    /// Run the benchmark problems of a JSON config.
    Bench(BenchArgs),
    /// Compare the replace-one CV standard error with the spread of the CV estimate.
    Azcheck(AzcheckArgs),
    /// Aggregate result files into a coverage and width table.
    Report(ReportArgs),
}

#[derive(Args)]
struct SimulateArgs {
    /// Process name, e.g. friedman1, bates_regr_20, chen_10.
    #[arg(long, required_unless_present = "config")]
    dgp: Option<String>,
    /// JSON file with a full process description, instead of --dgp.
    #[arg(long, conflicts_with = "dgp")]
    config: Option<PathBuf>,
    #[arg(short, long)]
    n: usize,
    #[arg(long)]
    seed: Option<u64>,
    /// Replication stream to draw.
    #[arg(long, default_value_t = 0)]
    stream: u64,
    /// Output CSV; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct CiArgs {
    /// Input CSV with a header row.
    #[arg(long)]
    data: PathBuf,
    #[arg(long, default_value = "y")]
    target: String,
    /// regression or classification; inferred from the target when omitted.
    #[arg(long)]
    task: Option<String>,
    #[arg(long, default_value = "ols")]
    inducer: String,
    /// Ridge penalty for ridge and ridge_logistic.
    #[arg(long, default_value_t = 0.0)]
    lambda: f64,
    #[arg(long, default_value = "squared")]
    loss: String,
    /// Method name, e.g. cort_25_90, cv_5_allpairs, ho_90.
    #[arg(long)]
    method: String,
    #[arg(long, default_value_t = 0.05)]
    alpha: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    truncate_at_zero: bool,
    /// Also write the interval as JSON to this file.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct RunArgs {
    /// Worker threads (results do not depend on it).
    #[arg(long)]
    threads: Option<usize>,
}

#[derive(Args)]
struct BenchArgs {
    #[arg(long)]
    config: PathBuf,
    /// Output directory for results.csv and summary.json.
    #[arg(long)]
    out: PathBuf,
    /// Overrides the seeds of the config (plans and data).
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    alpha: Option<f64>,
    /// Overrides the number of replications.
    #[arg(long)]
    reps: Option<usize>,
    #[arg(long)]
    truncate_at_zero: bool,
    /// Skip timing so that repeated runs give byte-identical files.
    #[arg(long)]
    no_timing: bool,
    #[command(flatten)]
    run: RunArgs,
}

#[derive(Args)]
struct AzcheckArgs {
    /// Sample sizes (comma separated).
    #[arg(long, value_delimiter = ',', default_values_t = SIZES)]
    n: Vec<usize>,
    #[arg(long, default_value_t = 100)]
    outer_reps: usize,
    #[arg(long, default_value_t = 10)]
    estimator_reps: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output CSV; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
    #[command(flatten)]
    run: RunArgs,
}

#[derive(Args)]
struct ReportArgs {
    /// Result CSV files written by `bench`.
    #[arg(required = true)]
    results: Vec<PathBuf>,
    #[arg(long, default_value_t = 0.05)]
    alpha: f64,
    #[arg(long)]
    truncate_at_zero: bool,
    /// Output CSV; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn output(path: Option<&Path>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(File::create(p)?)),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path)?;
    serde_json::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
}

fn simulate(args: SimulateArgs) -> Result<()> {
    let mut spec = match (&args.dgp, &args.config) {
        (Some(name), _) => DgpSpec::from_name(name)?,
        (None, Some(path)) => read_json(path)?,
        (None, None) => unreachable!("clap requires one of --dgp and --config"),
    };
    if let Some(seed) = args.seed {
        spec.seed = seed;
    }
    let data = gecover::data::generate(&spec, args.n, args.stream)?;
    let mut out = output(args.out.as_deref())?;
    data.write_csv(&mut out)?;
    out.flush()?;
    Ok(())
}

fn parse_task(s: &str) -> Result<Task> {
    match s {
        "regression" => Ok(Task::Regression),
        "classification" => Ok(Task::Classification),
        other => Err(Error::Usage(format!("unknown task '{other}' (expected regression or classification)"))),
    }
}

fn ci(args: CiArgs) -> Result<()> {
    let method = MethodSpec::parse(&args.method)?;
    let inducer = InducerSpec::new(args.inducer.parse::<InducerKind>()?).with_lambda(args.lambda);
    let loss = LossSpec::new(args.loss.parse::<LossKind>()?);
    let task = args.task.as_deref().map(parse_task).transpose()?;
    let data = Dataset::from_csv_path(&args.data, &args.target, task)?;
    let mut est = compute_interval(&method, &data, &inducer, &loss, args.alpha, args.seed)?;
    if args.truncate_at_zero {
        est.lower = est.lower.max(0.0);
        est.upper = est.upper.max(est.lower);
    }
    println!(
        "{}: point {:.6} [{:.6}, {:.6}] alpha {} fits_used {}",
        est.method, est.point, est.lower, est.upper, est.alpha, est.fits_used
    );
    if let Some(path) = &args.out {
        fs::write(path, serde_json::to_string_pretty(&est)?)?;
    }
    Ok(())
}

fn bench(args: BenchArgs) -> Result<()> {
    let config: BenchConfig = read_json(&args.config)?;
    let options = RunOptions {
        threads: args.run.threads,
        record_timing: !args.no_timing,
        truncate_at_zero: args.truncate_at_zero,
    };
    fs::create_dir_all(&args.out)?;
    let mut records = Vec::new();
    let mut summaries: Vec<RunSummary> = Vec::new();
    for mut problem in config.problems() {
        if let Some(seed) = args.seed {
            problem.seed = seed;
            problem.dgp.seed = seed;
        }
        if let Some(alpha) = args.alpha {
            problem.alpha = alpha;
        }
        if let Some(reps) = args.reps {
            problem.n_reps = reps;
        }
        log::info!("running {} at n = {} with {} replications", problem.dgp.label(), problem.n, problem.n_reps);
        let run = run_problem(&problem, &options)?;
        for m in &run.summary.methods {
            eprintln!(
                "{} n={} {}: coverage risk {:.3}, expected risk {:.3}, median width {:.4}",
                problem.dgp.label(),
                problem.n,
                m.method,
                m.coverage.coverage_risk,
                m.coverage.coverage_expected_risk,
                m.coverage.median_width
            );
        }
        records.extend(run.records);
        summaries.push(run.summary);
    }
    write_records(BufWriter::new(File::create(args.out.join("results.csv"))?), &records)?;
    fs::write(args.out.join("summary.json"), serde_json::to_string_pretty(&summaries)?)?;
    Ok(())
}

fn azcheck(args: AzcheckArgs) -> Result<()> {
    let rows = with_threads(args.run.threads, || run_azcheck(args.seed, &args.n, args.outer_reps, args.estimator_reps))??;
    let mut out = output(args.out.as_deref())?;
    writeln!(out, "n,ratio_uncorrected,ratio_corrected,sd_cv,mean_se_uncorrected,mean_se_corrected")?;
    for r in rows {
        writeln!(
            out,
            "{},{},{},{},{},{}",
            r.n, r.ratio_uncorrected, r.ratio_corrected, r.sd_cv, r.mean_se_uncorrected, r.mean_se_corrected
        )?;
    }
    out.flush()?;
    Ok(())
}

fn report_cmd(args: ReportArgs) -> Result<()> {
    let mut records = Vec::new();
    for path in &args.results {
        records.extend(read_records(File::open(path)?)?);
    }
    if args.truncate_at_zero {
        for r in &mut records {
            r.lower = r.lower.max(0.0);
            r.upper = r.upper.max(r.lower);
        }
    }
    let rows = report(&records, args.alpha)?;
    let mut out = output(args.out.as_deref())?;
    write_report(&mut out, &rows)?;
    out.flush()?;
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    let result = match cli.command {
        Command::Simulate(a) => simulate(a),
        Command::Ci(a) => ci(a),
        Command::Bench(a) => bench(a),
        Command::Azcheck(a) => azcheck(a),
        Command::Report(a) => report_cmd(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("gecover: {e}");
            match e {
                Error::Usage(_) | Error::Config(_) => ExitCode::from(2),
                _ => ExitCode::from(1),
            }
        }
    }
}
