use clap::{Args, Parser, Subcommand, ValueEnum};
use qpq::harness::{
    run_scenario, summarize_files, ExperimentConfig, HarnessError, OutputFormat, Scenario,
};
use qpq::stats::Sidedness;
use std::path::PathBuf;
use std::process::ExitCode;

/// Monte Carlo simulator for QKD-based private query protocols and attacks.
#[derive(Parser)]
#[command(name = "qpq-sim", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Honest user and database, honesty-checked protocol.
    YuHonest(RunArgs),
    /// Database splits its measurement in two and guesses conclusiveness.
    YuBobTwoStep(RunArgs),
    /// User spends the checks on her inconclusive positions.
    YuAliceInconclusiveChecks(RunArgs),
    /// Honest run of the reordering protocol.
    ChangHonest(RunArgs),
    /// Database infers measurement bases from announced counts.
    ChangBobCounting(RunArgs),
    /// User stores the qubits and returns a fake sequence.
    ChangAliceStoreFake(RunArgs),
    /// Optimal conclusiveness discrimination, analytic and sampled.
    Discriminate(RunArgs),
    /// Tabulate JSON reports of one scenario as CSV.
    Summarize {
        #[arg(required = false)]
        reports: Vec<PathBuf>,
        #[arg(long)]
        output: Option<PathBuf>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Json,
    Csv,
}

#[derive(Args)]
struct RunArgs {
    #[arg(long)]
    trials: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Database size N.
    #[arg(long)]
    db_size: Option<usize>,
    /// Substring count k.
    #[arg(long)]
    substrings: Option<usize>,
    #[arg(long)]
    check_fraction: Option<f64>,
    #[arg(long)]
    eta: Option<f64>,
    #[arg(long)]
    group_size: Option<usize>,
    /// Raw key length, or rounds per trial for two-step and discriminate.
    #[arg(long)]
    raw_length: Option<usize>,
    /// Groups per trial for the reordering protocol.
    #[arg(long)]
    groups: Option<usize>,
    #[arg(long)]
    significance: Option<f64>,
    /// Step-3 test rejects only an inflated Z rate.
    #[arg(long)]
    one_sided: bool,
    /// Database file: one line of 0/1 characters.
    #[arg(long)]
    database: Option<PathBuf>,
    #[arg(long)]
    output: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "json")]
    format: Format,
    /// Write duration_ms as 0 so repeated runs are byte-identical.
    #[arg(long)]
    no_timing: bool,
}

impl RunArgs {
    fn config(&self, scenario: Scenario) -> Result<ExperimentConfig, HarnessError> {
        let mut c = ExperimentConfig::new(scenario);
        if let Some(v) = self.trials {
            c.trials = v;
        }
        if let Some(v) = self.seed {
            c.seed = v;
        }
        if let Some(path) = &self.database {
            c.database = Some(path.clone());
            if self.db_size.is_none() {
                c.db_size = c.load_database()?.len();
            }
        }
        if let Some(v) = self.db_size {
            c.db_size = v;
        }
        if let Some(v) = self.substrings {
            c.substrings = v;
        }
        if let Some(v) = self.check_fraction {
            c.check_fraction = v;
        }
        if let Some(v) = self.eta {
            c.eta = v;
        }
        if let Some(v) = self.group_size {
            c.group_size = v;
        }
        c.refresh_derived();
        if let Some(v) = self.raw_length {
            c.raw_length = v;
        }
        if let Some(v) = self.groups {
            c.group_count = v;
        }
        if let Some(v) = self.significance {
            c.significance = v;
        }
        if self.one_sided {
            c.step3_side = Sidedness::Greater;
        }
        Ok(c)
    }
}

fn emit(text: &str, output: Option<&PathBuf>) -> Result<(), HarnessError> {
    match output {
        Some(path) => std::fs::write(path, text)?,
        None => print!("{text}"),
    }
    Ok(())
}

fn run(cli: Cli) -> Result<(), HarnessError> {
    let (scenario, args) = match cli.command {
        Command::Summarize { reports, output } => {
            return emit(&summarize_files(&reports)?, output.as_ref());
        }
        Command::YuHonest(a) => (Scenario::YuHonest, a),
        Command::YuBobTwoStep(a) => (Scenario::YuBobTwoStep, a),
        Command::YuAliceInconclusiveChecks(a) => (Scenario::YuAliceInconclusiveChecks, a),
        Command::ChangHonest(a) => (Scenario::ChangHonest, a),
        Command::ChangBobCounting(a) => (Scenario::ChangBobCounting, a),
        Command::ChangAliceStoreFake(a) => (Scenario::ChangAliceStoreFake, a),
        Command::Discriminate(a) => (Scenario::Discriminate, a),
    };
    let config = args.config(scenario)?;
    let mut report = run_scenario(&config)?;
    if args.no_timing {
        report = report.without_timing();
    }
    let format = match args.format {
        Format::Json => OutputFormat::Json,
        Format::Csv => OutputFormat::Csv,
    };
    emit(&report.render(format)?, args.output.as_ref())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("qpq-sim: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
