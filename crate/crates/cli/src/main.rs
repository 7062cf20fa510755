use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

mod commands;
mod config;

use config::UsageError;

#[derive(Debug, Parser)]
#[command(name = "distancing", version, about = "Exposure indices, calibration and wage subsidies for contact caps")]
struct Cli {
    /// Run configuration (TOML). Relative paths inside it resolve against its directory.
    #[arg(long, short, global = true)]
    config: Option<PathBuf>,

    /// Worker threads; defaults to the number of CPUs.
    #[arg(long, global = true)]
    threads: Option<usize>,

    /// Output directory, overriding `output_dir`.
    #[arg(long, short, global = true)]
    out: Option<PathBuf>,

    /// Treat occupations with missing work-context items as not exposed instead of failing.
    #[arg(long, global = true)]
    lenient: bool,

    /// More log output (-v info, -vv debug).
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    verbose: u8,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Occupation flags, industry exposure and (with geographic inputs) location exposure.
    Index,
    /// Fit ε and the contact cap N; prints a report and writes calibration.csv.
    Calibrate(TargetArgs),
    /// Wage subsidies by sector and location under the calibrated cap.
    Subsidy(TargetArgs),
    /// Cost ratios along density for one firm type, with and without telecommunication.
    Fig2(Fig2Args),
    /// Weighted local-linear smoothing of one column against another.
    Lowess(LowessArgs),
}

#[derive(Debug, Clone, Args)]
pub struct TargetArgs {
    /// Use this ε instead of fitting it to the elasticity target.
    #[arg(long)]
    pub fixed_eps: Option<f64>,
    /// Share of unconstrained contacts that remains under the cap.
    #[arg(long)]
    pub target_share: Option<f64>,
    /// Slope of communication exposure on log density to match.
    #[arg(long)]
    pub target_elasticity: Option<f64>,
    /// Sector exclusion list, overriding `inputs.exclusions`.
    #[arg(long)]
    pub exclusions: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct Fig2Args {
    #[arg(long)]
    pub chi: Option<f64>,
    #[arg(long)]
    pub eps: Option<f64>,
    #[arg(long)]
    pub contact_cap: Option<f64>,
    /// Telecommunication cost per contact.
    #[arg(long, conflicts_with = "no_telecom")]
    pub telecom_cost: Option<f64>,
    /// Leave telecommunication out.
    #[arg(long)]
    pub no_telecom: bool,
    #[arg(long)]
    pub points: Option<usize>,
}

#[derive(Debug, Clone, Args)]
pub struct LowessArgs {
    /// CSV to smooth; defaults to location-index.csv in the output directory.
    #[arg(long)]
    pub input: Option<PathBuf>,
    #[arg(long, default_value = "density")]
    pub x: String,
    #[arg(long, default_value = "share_communication")]
    pub y: String,
    /// Weight column; unweighted when omitted.
    #[arg(long)]
    pub weight: Option<String>,
    /// Smooth against ln x (rows with x <= 0 are dropped).
    #[arg(long)]
    pub log_x: bool,
    /// Fraction of points in each local window.
    #[arg(long, default_value_t = 0.5)]
    pub bandwidth: f64,
    /// Output file; defaults to lowess.csv in the output directory.
    #[arg(long)]
    pub output: Option<PathBuf>,
}

fn exit_code(err: &anyhow::Error) -> u8 {
    for cause in err.chain() {
        if cause.downcast_ref::<UsageError>().is_some() {
            return 2;
        }
        if let Some(e) = cause.downcast_ref::<distancing::Error>() {
            return match e {
                distancing::Error::Argument(_) => 2,
                distancing::Error::Io { source, .. } if source.kind() == std::io::ErrorKind::NotFound => 2,
                _ => 1,
            };
        }
    }
    1
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level))
        .format_timestamp(None)
        .init();

    let result = (|| {
        let mut pool = rayon::ThreadPoolBuilder::new();
        if let Some(n) = cli.threads {
            if n == 0 {
                return Err(config::usage("--threads must be at least 1"));
            }
            pool = pool.num_threads(n);
        }
        let pool = pool.build()?;
        let ctx = commands::Context::new(cli.config.as_deref(), cli.out.as_deref(), cli.lenient)?;
        pool.install(|| match &cli.command {
            Command::Index => commands::index(&ctx),
            Command::Calibrate(t) => commands::calibrate(&ctx, t),
            Command::Subsidy(t) => commands::subsidy(&ctx, t),
            Command::Fig2(f) => commands::fig2(&ctx, f),
            Command::Lowess(l) => commands::lowess(&ctx, l),
        })
    })();

    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
