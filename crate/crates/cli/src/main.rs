use std::fs::File;
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use riskbench::harness::aggregate::selection_path;
use riskbench::harness::apply::{read_external, write_report};
use riskbench::harness::{
    aggregate, apply_trial, emit_figure_data, load_summary, read_results, run_sweep, save_summary, write_results,
    ApplySpec, FigureId, MetricPopulation, RunConfig,
};
use riskbench::models::MethodKind;
use riskbench::scenario::grid::{
    build_interaction_grid, build_risk_grid, shipped_scenarios, DEFAULT_CALIBRATION_SEED, DEFAULT_CALIBRATION_SIZE,
};
use riskbench::scenario::{load_scenarios, write_scenarios, Scenario};

#[derive(Parser)]
#[command(name = "riskbench", version, about = "Simulation sweeps for risk-based treatment benefit models")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run replications over a set of scenarios.
    Simulate(SimulateArgs),
    /// Summarize a results directory into percentile tables.
    Aggregate {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Write the data behind one figure.
    Figure {
        #[arg(long)]
        id: String,
        /// Aggregate file produced by `aggregate`.
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Scenario file for truth curves; defaults to the built-in grid.
        #[arg(long)]
        scenarios: Option<PathBuf>,
    },
    /// Fit the two-stage models to an external trial file.
    Apply(ApplyArgs),
    /// Regenerate the scenario grid files.
    Grid {
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = DEFAULT_CALIBRATION_SIZE)]
        calibration_size: usize,
        #[arg(long, default_value_t = DEFAULT_CALIBRATION_SEED)]
        seed: u64,
    },
}

#[derive(Args)]
struct SimulateArgs {
    /// Scenario file; defaults to the built-in grid.
    #[arg(long)]
    scenarios: Option<PathBuf>,
    /// Scenario ids such as `217,289` or `1-36`; all when omitted.
    #[arg(long)]
    ids: Option<String>,
    #[arg(long)]
    replications: Option<u32>,
    #[arg(long)]
    superpop: Option<usize>,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Worker threads; 0 picks one per core.
    #[arg(long, default_value_t = 0)]
    workers: usize,
    #[arg(long)]
    out: PathBuf,
    /// 200 replications and a super-population of 100,000.
    #[arg(long)]
    fast: bool,
    #[arg(long, default_value = "superpop")]
    metric_pop: MetricPopulation,
    /// Risk strata of the stratified method.
    #[arg(long, default_value_t = 4)]
    strata: usize,
}

#[derive(Args)]
struct ApplyArgs {
    #[arg(long)]
    data: PathBuf,
    #[arg(long)]
    outcome: String,
    #[arg(long)]
    treatment: String,
    /// Comma-separated covariate columns.
    #[arg(long, value_delimiter = ',', required = true)]
    covariates: Vec<String>,
    #[arg(long, default_value = "adaptive")]
    method: MethodKind,
    #[arg(long, default_value_t = 5)]
    folds: usize,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[arg(long, default_value_t = 4)]
    strata: usize,
    /// Directory for the per-patient, AIC and cross-validation files.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn parse_ids(spec: &str) -> Result<Vec<u32>> {
    let mut ids = Vec::new();
    for part in spec.split(',').map(str::trim).filter(|p| !p.is_empty()) {
        match part.split_once('-') {
            Some((a, b)) => {
                let (a, b): (u32, u32) = (a.trim().parse()?, b.trim().parse()?);
                if a > b {
                    bail!("empty id range `{part}`");
                }
                ids.extend(a..=b);
            }
            None => ids.push(part.parse().with_context(|| format!("bad scenario id `{part}`"))?),
        }
    }
    Ok(ids)
}

fn scenarios_from(path: Option<&Path>) -> Result<Vec<Scenario>> {
    match path {
        Some(p) => load_scenarios(p).with_context(|| format!("reading {}", p.display())),
        None => Ok(shipped_scenarios()),
    }
}

fn simulate(args: SimulateArgs) -> Result<()> {
    let scenarios = scenarios_from(args.scenarios.as_deref())?;
    let mut config = RunConfig::default();
    if args.fast {
        config = config.fast();
    }
    if let Some(r) = args.replications {
        config.replications = r;
    }
    if let Some(s) = args.superpop {
        config.superpop_size = s;
    }
    config.scenario_ids = args.ids.as_deref().map(parse_ids).transpose()?.unwrap_or_default();
    config.master_seed = args.seed;
    config.worker_count = args.workers;
    config.metric_population = args.metric_pop;
    config.n_strata = args.strata;
    config.output_dir = Some(args.out.clone());

    let results = run_sweep(&scenarios, &config)?;
    std::fs::create_dir_all(&args.out)?;
    write_results(BufWriter::new(File::create(args.out.join("results.csv"))?), &results)?;
    std::fs::write(args.out.join("run.json"), serde_json::to_string_pretty(&config)?)?;
    let failed = results.iter().filter(|r| r.is_failed()).count();
    eprintln!("{} rows written to {} ({} failed)", results.len(), args.out.display(), failed);
    Ok(())
}

/// Results files in `input`: the file itself, or every `results*.csv` in a directory.
fn result_files(input: &Path) -> Result<Vec<PathBuf>> {
    if input.is_file() {
        return Ok(vec![input.to_path_buf()]);
    }
    let mut files: Vec<PathBuf> = std::fs::read_dir(input)
        .with_context(|| format!("reading {}", input.display()))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| {
            p.file_name()
                .and_then(|n| n.to_str())
                .is_some_and(|n| n.starts_with("results") && n.ends_with(".csv"))
        })
        .collect();
    files.sort();
    if files.is_empty() {
        bail!("no results*.csv files in {}", input.display());
    }
    Ok(files)
}

fn run_aggregate(input: &Path, out: &Path) -> Result<()> {
    let mut results = Vec::new();
    for f in result_files(input)? {
        results.extend(read_results(File::open(&f)?).with_context(|| format!("reading {}", f.display()))?);
    }
    if results.is_empty() {
        bail!("no result rows found");
    }
    if let Some(dir) = out.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir)?;
    }
    save_summary(out, &aggregate(&results))?;
    eprintln!("wrote {} and {}", out.display(), selection_path(out).display());
    Ok(())
}

fn run_figure(id: &str, input: &Path, out: &Path, scenarios: Option<&Path>) -> Result<()> {
    let id: FigureId = id.parse()?;
    let summary = load_summary(input).with_context(|| format!("reading {}", input.display()))?;
    let scenarios = scenarios_from(scenarios)?;
    for path in emit_figure_data(&summary, id, &scenarios, out)? {
        println!("{}", path.display());
    }
    Ok(())
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map_or_else(|| "-".to_string(), |x| format!("{x:.3}"))
}

fn run_apply(args: ApplyArgs) -> Result<()> {
    let covariates: Vec<&str> = args.covariates.iter().map(String::as_str).collect();
    let mut spec = ApplySpec::new(&args.outcome, &args.treatment, &covariates, args.method);
    spec.folds = args.folds;
    spec.seed = args.seed;
    spec.n_strata = args.strata;
    let file = File::open(&args.data).with_context(|| format!("opening {}", args.data.display()))?;
    let trial = read_external(file, &spec).with_context(|| format!("reading {}", args.data.display()))?;
    let report = apply_trial(&trial, &spec)?;

    println!("method\tlog_likelihood\taic");
    for row in &report.aic_table {
        println!("{}\t{}\t{}", row.method, fmt_opt(row.log_likelihood), fmt_opt(row.aic));
    }
    if report.method == MethodKind::Adaptive {
        println!("selected: {}", report.effective_method);
    }
    let cv = &report.cross_validated;
    println!(
        "{}-fold cross-validated c-for-benefit {} ICI-for-benefit {} ({} pairs)",
        cv.folds,
        fmt_opt(cv.c_for_benefit),
        fmt_opt(cv.ici_benefit),
        cv.n_pairs
    );
    if let Some(out) = &args.out {
        for p in write_report(out, &report)? {
            eprintln!("wrote {}", p.display());
        }
    }
    Ok(())
}

fn run_grid(out: &Path, size: usize, seed: u64) -> Result<()> {
    std::fs::create_dir_all(out)?;
    let risk = build_risk_grid(size, seed)?;
    write_scenarios(File::create(out.join("scenarios.csv"))?, &risk)?;
    let inter = build_interaction_grid(size, seed)?;
    write_scenarios(File::create(out.join("interactions.csv"))?, &inter)?;
    eprintln!("{} risk-based and {} interaction scenarios", risk.len(), inter.len());
    Ok(())
}

fn main() -> Result<()> {
    match Cli::parse().command {
        Command::Simulate(args) => simulate(args),
        Command::Aggregate { input, out } => run_aggregate(&input, &out),
        Command::Figure {
            id,
            input,
            out,
            scenarios,
        } => run_figure(&id, &input, &out, scenarios.as_deref()),
        Command::Apply(args) => run_apply(args),
        Command::Grid { out, calibration_size, seed } => run_grid(out.as_path(), calibration_size, seed),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn id_lists_and_ranges() {
        assert_eq!(parse_ids("217, 289,1-3").unwrap(), vec![217, 289, 1, 2, 3]);
        assert!(parse_ids("5-2").is_err());
        assert!(parse_ids("x").is_err());
    }
}
