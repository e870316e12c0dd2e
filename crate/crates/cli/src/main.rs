use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use climate_itm::robust::{Alpha, DrawResponse};
use climate_itm::scenario::{
    compare_cmd, load_config, parse_regimes, randomize_cmd, robust_cmd, run_cmd, sweep_cmd, CommandReport,
    ScenarioConfig, ScenarioError,
};

#[derive(Parser)]
#[command(name = "itm", version, about = "Run climate regime scenarios and export CSV/JSON results")]
struct Cli {
    /// Scenario file; unset keys take their defaults.
    #[arg(long, global = true, env = "ITM_CONFIG")]
    config: Option<PathBuf>,

    /// Output directory.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,

    /// Log more (repeat for debug output).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,

    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct RegimeArg {
    /// gp, rp, nash, a comma-separated list, or all.
    #[arg(long, default_value = "all")]
    regime: String,
}

#[derive(Subcommand)]
enum Command {
    /// Solve regimes and write time series and summaries.
    Run(RegimeArg),
    /// Vary one numeric setting and tabulate the outcomes.
    Sweep {
        /// Setting to vary, e.g. sigma, gamma_split, econ.A_bar.
        #[arg(long)]
        axis: String,
        /// Comma-separated values.
        #[arg(long, value_delimiter = ',', required = true)]
        values: Vec<f64>,
        #[command(flatten)]
        regime: RegimeArg,
    },
    /// Temperature paths of the robust regimes over penalty weights.
    Robust {
        /// Comma-separated weights; "inf" gives the non-robust model.
        #[arg(long, value_delimiter = ',', required = true)]
        alphas: Vec<Alpha>,
        #[command(flatten)]
        regime: RegimeArg,
    },
    /// Percentile bands of temperature under randomly drawn damages.
    Randomize {
        #[arg(long)]
        draws: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
        /// Whether each draw gets the robust or the naive response.
        #[arg(long, value_parser = ["robust", "naive"])]
        response: Option<String>,
        #[command(flatten)]
        regime: RegimeArg,
    },
    /// Check the regime orderings (log utility only).
    Compare,
}

fn load(cli: &Cli) -> Result<ScenarioConfig, ScenarioError> {
    match &cli.config {
        Some(p) => load_config(p),
        None => {
            let cfg = ScenarioConfig::default();
            for w in &cfg.warnings {
                log::warn!("{w}");
            }
            Ok(cfg)
        }
    }
}

fn execute(cli: &Cli) -> Result<CommandReport, ScenarioError> {
    let mut cfg = load(cli)?;
    let out = &cli.out;
    match &cli.command {
        Command::Run(r) => run_cmd(&cfg, &parse_regimes(&r.regime)?, out),
        Command::Sweep { axis, values, regime } => sweep_cmd(&cfg, axis, values, &parse_regimes(&regime.regime)?, out),
        Command::Robust { alphas, regime } => robust_cmd(&cfg, &parse_regimes(&regime.regime)?, alphas, out),
        Command::Randomize {
            draws,
            seed,
            response,
            regime,
        } => {
            if let Some(n) = draws {
                cfg.randomization.n_draws = *n;
            }
            if let Some(s) = seed {
                cfg.randomization.seed = *s;
            }
            if let Some(r) = response {
                cfg.randomization.response = if r == "naive" {
                    DrawResponse::Naive
                } else {
                    DrawResponse::Robust
                };
            }
            cfg.randomization
                .validate()
                .map_err(|e| ScenarioError::Config(format!("randomization: {e}")))?;
            randomize_cmd(&cfg, &parse_regimes(&regime.regime)?, out)
        }
        Command::Compare => match compare_cmd(&cfg, out) {
            Ok((report, written)) => {
                println!(
                    "{} orderings hold; precondition {} vs {} ({})",
                    report.orderings.iter().filter(|o| !o.conditional).count(),
                    report.precondition.lhs,
                    report.precondition.rhs,
                    if report.precondition.holds { "holds" } else { "does not hold" }
                );
                Ok(written)
            }
            Err(e) => Err(e),
        },
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match execute(&cli) {
        Ok(report) => {
            for f in &report.files {
                println!("{}", cli.out.join(f).display());
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
