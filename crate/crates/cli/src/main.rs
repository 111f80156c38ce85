use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use sipcq::optimality::Variant;
use sipcq_cli::error::{EXIT_OK, EXIT_SOLVER_LIMIT};
use sipcq_cli::pipeline::parse_point;
use sipcq_cli::{cmd_analyze, cmd_solve, encode, text, CliError, ReportDocument, ReportMode, Settings};

#[derive(Parser)]
#[command(name = "sipcq", version, about = "Constraint qualifications, normal cones and stationarity for semi-infinite programs")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Analyze a given point of an instance.
    Analyze {
        instance: PathBuf,
        /// Comma-separated coordinates, e.g. --point=-1,0
        #[arg(long, allow_hyphen_values = true)]
        point: String,
        #[command(flatten)]
        common: Common,
    },
    /// Run the exchange solver, then analyze its candidate.
    Solve {
        instance: PathBuf,
        /// Outer exchange iterations.
        #[arg(long)]
        max_iters: Option<usize>,
        #[command(flatten)]
        common: Common,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Report {
    Json,
    Text,
    Both,
}

#[derive(Clone, Copy, ValueEnum)]
enum VariantArg {
    Perturbed,
    Unperturbed,
    Normalized,
}

#[derive(Args)]
struct Common {
    /// Strictly decreasing ε values, comma-separated.
    #[arg(long, value_delimiter = ',')]
    eps_schedule: Option<Vec<f64>>,
    #[arg(long)]
    margin_tol: Option<f64>,
    /// Truncation of every countable index set.
    #[arg(long)]
    truncation: Option<u64>,
    /// Normal-cone variants, comma-separated.
    #[arg(long, value_enum, value_delimiter = ',', default_value = "perturbed")]
    variant: Vec<VariantArg>,
    /// Number of probe directions for the empirical normal-cone check.
    #[arg(long, default_value_t = 8)]
    probe_dirs: usize,
    /// Samples per probe radius.
    #[arg(long, default_value_t = 2000)]
    probe_samples: usize,
    #[arg(long, default_value_t = 1e-3)]
    probe_radius: f64,
    #[arg(long, value_enum, default_value = "text")]
    report: Report,
    /// Also write the JSON report to this file.
    #[arg(long)]
    json_out: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Candidate Slater point, comma-separated.
    #[arg(long, allow_hyphen_values = true)]
    slater_point: Option<String>,
    /// Leave timestamps and timings out of the report.
    #[arg(long)]
    deterministic: bool,
}

impl Common {
    fn settings(&self, max_iters: Option<usize>) -> Result<Settings, CliError> {
        let d = Settings::default();
        Ok(Settings {
            eps_schedule: self.eps_schedule.clone().unwrap_or(d.eps_schedule),
            margin_tol: self.margin_tol.unwrap_or(d.margin_tol),
            truncation: self.truncation,
            variants: self
                .variant
                .iter()
                .map(|v| match v {
                    VariantArg::Perturbed => Variant::Perturbed,
                    VariantArg::Unperturbed => Variant::Unperturbed,
                    VariantArg::Normalized => Variant::Normalized,
                })
                .collect(),
            probe_dirs: self.probe_dirs,
            probe_samples: self.probe_samples,
            probe_radius: self.probe_radius,
            seed: self.seed,
            deterministic: self.deterministic,
            report: match self.report {
                Report::Json => ReportMode::Json,
                Report::Text => ReportMode::Text,
                Report::Both => ReportMode::Both,
            },
            max_iters,
            slater_point: self.slater_point.as_deref().map(parse_point).transpose()?,
            ..d
        })
    }
}

fn emit(doc: &ReportDocument, mode: ReportMode, json_out: Option<&PathBuf>) -> Result<(), CliError> {
    let json = encode::to_json(doc).map_err(CliError::Encoding)?;
    match mode {
        ReportMode::Text => print!("{}", text::render(doc)),
        ReportMode::Json => println!("{json}"),
        ReportMode::Both => {
            print!("{}", text::render(doc));
            println!("\n{json}");
        }
    }
    if let Some(p) = json_out {
        std::fs::write(p, format!("{json}\n")).map_err(|e| CliError::Output {
            path: p.display().to_string(),
            message: e.to_string(),
        })?;
    }
    Ok(())
}

fn run(cli: Cli) -> Result<i32, CliError> {
    match cli.command {
        Command::Analyze { instance, point, common } => {
            let s = common.settings(None)?;
            let x = parse_point(&point)?;
            let doc = cmd_analyze(&instance, &x, &s)?;
            emit(&doc, s.report, common.json_out.as_ref())?;
            Ok(EXIT_OK)
        }
        Command::Solve { instance, max_iters, common } => {
            let s = common.settings(max_iters)?;
            let (doc, code) = cmd_solve(&instance, &s)?;
            emit(&doc, s.report, common.json_out.as_ref())?;
            if code == EXIT_SOLVER_LIMIT {
                eprintln!("error: solver stopped at its iteration limit before reaching feasibility");
            }
            Ok(code)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
