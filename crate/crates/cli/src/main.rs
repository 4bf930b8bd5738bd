mod commands;
mod report;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use report::Status;

#[derive(Parser, Debug)]
#[command(name = "msequiv", version, about = "Build and verify multistability-equivalent GRN models")]
struct Cli {
    /// Directory for the JSON run report and CSV side outputs.
    #[arg(long, global = true, env = "MSEQUIV_REPORT_DIR")]
    out_dir: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Clone, serde::Serialize)]
pub struct Multistart {
    /// Newton starting points.
    #[arg(long, default_value_t = 2000)]
    pub starts: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Subcommand, Debug, serde::Serialize)]
#[serde(untagged)]
enum Command {
    /// Check the modular structure of a sign matrix and its sign consistency with a model.
    Check {
        model: PathBuf,
        sign_matrix: PathBuf,
    },
    /// Construct the high-dimensional model.
    Construct {
        model: PathBuf,
        sign_matrix: PathBuf,
        /// Module degradation rates, one per module gene.
        #[arg(long = "K", value_delimiter = ',', conflicts_with = "auto", required_unless_present = "auto")]
        k: Option<Vec<f64>>,
        /// Weights of the auxiliary map: one value for all masters or one per master.
        #[arg(long, value_delimiter = ',', default_value = "1e-3")]
        eps: Vec<f64>,
        /// Search for K and eps instead of taking them from the command line.
        #[arg(long)]
        auto: bool,
        /// Acceptance rule for --auto: `tube` or `winding`.
        #[arg(long, default_value = "tube")]
        criterion: String,
        /// Where to write the model file; stdout if absent and no --out-dir.
        #[arg(long)]
        output: Option<PathBuf>,
        #[command(flatten)]
        multistart: Multistart,
    },
    /// Find and classify steady states.
    SteadyStates {
        model: PathBuf,
        #[command(flatten)]
        multistart: Multistart,
    },
    /// Check multistability equivalence of a low- and a high-dimensional model.
    Equivalence {
        low: PathBuf,
        high: PathBuf,
        /// Points at which the interaction signs are sampled.
        #[arg(long, default_value_t = 1000)]
        sign_samples: usize,
        /// Skip the Nyquist comparison.
        #[arg(long)]
        no_nyquist: bool,
        #[command(flatten)]
        multistart: Multistart,
    },
    /// Nyquist curve of the loopbroken system at one steady state.
    Nyquist {
        model: PathBuf,
        /// 1-based, in the order printed by steady-states.
        #[arg(long, default_value_t = 1)]
        state_index: usize,
        #[arg(long)]
        omega_max: Option<f64>,
        #[command(flatten)]
        multistart: Multistart,
    },
    /// Integrate the model in time.
    Simulate {
        model: PathBuf,
        #[arg(long, value_delimiter = ',', required = true)]
        x0: Vec<f64>,
        #[arg(long)]
        t_end: f64,
        #[arg(long, default_value_t = 201)]
        samples: usize,
        #[arg(long, default_value_t = 1e-8)]
        rtol: f64,
        #[arg(long, default_value_t = 1e-10)]
        atol: f64,
    },
    /// Continue a steady state in one parameter and report folds.
    Continue {
        model: PathBuf,
        #[arg(long)]
        param: String,
        /// `start:end`; the branch starts at `start`.
        #[arg(long)]
        range: String,
        /// 1-based index among the steady states at the start of the range.
        #[arg(long, default_value_t = 1)]
        from_state: usize,
        /// Stop after passing this many folds.
        #[arg(long)]
        stop_after_folds: Option<usize>,
        #[command(flatten)]
        multistart: Multistart,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let name = cli.command.name();
    let (outcome, mut report) = commands::run(cli.command);
    let status = match outcome {
        Ok(out) => {
            report.result = out.result;
            report.warnings = out.warnings;
            if let Some(text) = &out.stdout {
                print!("{text}");
            }
            if let (Some(dir), Some((file, csv))) = (&cli.out_dir, &out.table) {
                if let Err(e) = std::fs::create_dir_all(dir).and_then(|_| std::fs::write(dir.join(file), csv)) {
                    eprintln!("error: cannot write {}: {e}", dir.join(file).display());
                    return ExitCode::from(Status::InputError.exit_code());
                }
            }
            out.status
        }
        Err(f) => {
            let msg = render(&f.error);
            eprintln!("error: {msg}");
            report.result = f.partial;
            report.error = Some(msg);
            f.status
        }
    };
    report.finish(status);
    if let Some(dir) = &cli.out_dir {
        match report.write(dir) {
            Ok(path) => eprintln!("report: {}", path.display()),
            Err(e) => {
                eprintln!("error: cannot write report for {name}: {e}");
                return ExitCode::from(Status::InputError.exit_code());
            }
        }
    }
    ExitCode::from(status.exit_code())
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Check { .. } => "check",
            Command::Construct { .. } => "construct",
            Command::SteadyStates { .. } => "steady-states",
            Command::Equivalence { .. } => "equivalence",
            Command::Nyquist { .. } => "nyquist",
            Command::Simulate { .. } => "simulate",
            Command::Continue { .. } => "continue",
        }
    }
}

/// The error chain joined by ": ", skipping causes whose text the previous
/// message already embeds.
fn render(err: &anyhow::Error) -> String {
    let mut out = String::new();
    let mut last = String::new();
    for cause in err.chain() {
        let text = cause.to_string();
        if !last.is_empty() && last.contains(&text) {
            continue;
        }
        if !out.is_empty() {
            out.push_str(": ");
        }
        out.push_str(&text);
        last = text;
    }
    out
}
