use std::fs::File;
use std::io::{BufReader, BufWriter};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use hofd_sense::bench::{self, Experiment, ExperimentConfig, Method};
use hofd_sense::distributions::{check_c2_gaussian, copula_lower_bound, CopulaSpec, GaussianMixtureSpec, IpdvLaw};
use hofd_sense::{Error, Result};

#[derive(Parser)]
#[command(name = "hofd-sense", version, about = "Generalized sensitivity indices for dependent inputs")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a seeded replication experiment and write records, summary and boxplot CSVs.
    Run(RunArgs),
    /// Certify the density lower-bound condition for a mixture, law or copula JSON file.
    Check {
        #[arg(long)]
        spec: PathBuf,
    },
    /// Summarize a records CSV; the boxplot data goes next to the output.
    Summarize {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(clap::Args)]
struct RunArgs {
    /// JSON experiment configuration; explicit flags override its fields.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    experiment: Option<Experiment>,
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    reps: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, value_delimiter = ',')]
    a_grid: Option<Vec<f64>>,
    #[arg(long)]
    b: Option<f64>,
    #[arg(long)]
    out: Option<PathBuf>,
}

impl RunArgs {
    fn config(self) -> Result<ExperimentConfig> {
        let mut cfg = match (&self.config, self.experiment) {
            (Some(path), _) => serde_json::from_reader(BufReader::new(File::open(path)?))?,
            (None, Some(e)) => ExperimentConfig::new(e),
            (None, None) => return Err(Error::InvalidSpec("--experiment or --config is required".into())),
        };
        if let Some(e) = self.experiment {
            cfg.experiment = e;
        }
        if let Some(n) = self.n {
            cfg.n = n;
        }
        if let Some(reps) = self.reps {
            cfg.reps = reps;
        }
        if let Some(seed) = self.seed {
            cfg.seed = seed;
        }
        if let Some(grid) = self.a_grid {
            cfg.ishigami_a_grid = grid;
        }
        if let Some(b) = self.b {
            cfg.ishigami_b = b;
        }
        if let Some(out) = self.out {
            cfg.output_dir = out;
        }
        Ok(cfg)
    }
}

fn run(args: RunArgs) -> Result<()> {
    let cfg = args.config()?;
    let outcome = bench::execute(&cfg)?;
    bench::write_outputs(&cfg.output_dir, &outcome)?;
    for (label, failed) in &outcome.excluded {
        if *failed > 0 {
            eprintln!("warning: {label}: {failed} non-convergent replication(s) excluded from the summary");
        }
    }
    for (label, reason) in &outcome.missing_oracles {
        eprintln!("warning: {label}: no oracle ({reason})");
    }
    println!("{:<20} {:<8} {:>10} {:>10} {:>10}", "experiment", "index", "mean", "std", "oracle");
    for row in outcome.summary.iter().filter(|r| r.method == Method::Generalized) {
        let oracle = outcome
            .summary
            .iter()
            .find(|o| o.method == Method::Oracle && o.experiment == row.experiment && o.index == row.index)
            .map(|o| format!("{:>10.4}", o.mean))
            .unwrap_or_else(|| format!("{:>10}", "-"));
        let std = row.std.map(|s| format!("{s:>10.4}")).unwrap_or_else(|| format!("{:>10}", "-"));
        println!("{:<20} {:<8} {:>10.4} {std} {oracle}", row.experiment, row.index, row.mean);
    }
    println!("wrote records.csv, summary.csv, boxplot.csv to {}", cfg.output_dir.display());
    outcome.check_convergence()
}

fn check(path: PathBuf) -> Result<()> {
    let value: serde_json::Value = serde_json::from_reader(BufReader::new(File::open(&path)?))?;
    let reports = if value.get("family").is_some() {
        vec![copula_lower_bound(&serde_json::from_value::<CopulaSpec>(value)?)]
    } else if value.get("blocks").is_some() {
        serde_json::from_value::<IpdvLaw>(value)?.certify()?
    } else {
        vec![check_c2_gaussian(&serde_json::from_value::<GaussianMixtureSpec>(value)?)?]
    };
    println!("{}", serde_json::to_string_pretty(&reports)?);
    if reports.iter().all(|r| r.holds) {
        Ok(())
    } else {
        Err(Error::Inadmissible(
            reports.iter().filter(|r| !r.holds).map(|r| r.details.as_str()).collect::<Vec<_>>().join("; "),
        ))
    }
}

fn summarize(input: PathBuf, out: PathBuf) -> Result<()> {
    let records = bench::read_records(BufReader::new(File::open(&input)?))?;
    let boxplot = out.with_file_name("boxplot.csv");
    if boxplot == out {
        return Err(Error::InvalidSpec("--out must not be named boxplot.csv".into()));
    }
    let rows = bench::summarize(&records)?;
    bench::write_summary(BufWriter::new(File::create(&out)?), &rows)?;
    bench::write_boxplot(BufWriter::new(File::create(&boxplot)?), &records)?;
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run(args) => run(args),
        Command::Check { spec } => check(spec),
        Command::Summarize { input, out } => summarize(input, out),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
