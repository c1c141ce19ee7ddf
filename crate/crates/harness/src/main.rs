use std::fs::File;
use std::io::BufReader;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use parkcharge_core::scenarios::{
    read_trace_csv, sample_scenario, write_requests_csv, write_solar_csv, ScenarioParams,
};
use parkcharge_harness::config::{Config, ForecastKind};
use parkcharge_harness::experiment::{
    run_days, scenario_days, seed_range, trace_days, write_reports, ExperimentReport, Mode, SeededDay,
};
use parkcharge_harness::investment::{investment_sweep, write_sweep_csv};
use parkcharge_harness::verify::verify_bounds;

/// Accounting identities must hold to this tolerance.
const ACCOUNTING_TOL: f64 = 1e-6;

#[derive(Parser)]
#[command(
    name = "parkcharge",
    version,
    about = "Posted-price admission control and smart charging for EV parking"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Experiment configuration (TOML).
    #[arg(long)]
    config: PathBuf,
    /// First scenario seed; defaults to the configured one.
    #[arg(long)]
    seed: Option<u64>,
    /// Number of consecutive seeds.
    #[arg(long, default_value_t = 1)]
    seeds: usize,
    /// Output directory.
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Overrides the configured forecast mode.
    #[arg(long, value_enum)]
    forecast: Option<ForecastKind>,
    /// Overrides the configured departure buffer, in slots.
    #[arg(long)]
    buffer: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Run one controller over the seeded scenario days.
    Simulate {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_enum, default_value_t = Mode::Mechanism)]
        mode: Mode,
        /// Directory with requests.csv (and optionally solar.csv) to run instead of sampling.
        #[arg(long)]
        scenario: Option<PathBuf>,
    },
    /// Run several controllers over the same scenario days.
    Compare {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_enum, value_delimiter = ',', default_values_t = [Mode::Mechanism, Mode::Fcfs])]
        mode: Vec<Mode>,
        /// Directory with requests.csv (and optionally solar.csv) to run instead of sampling.
        #[arg(long)]
        scenario: Option<PathBuf>,
    },
    /// Check the competitive-ratio and duality guarantees on random small instances.
    VerifyBounds {
        #[command(flatten)]
        common: Common,
    },
    /// Welfare minus infrastructure cost over a grid of charger and cable counts.
    SweepInvestment {
        #[command(flatten)]
        common: Common,
    },
    /// Write the sampled scenario as CSV.
    GenScenario {
        #[command(flatten)]
        common: Common,
    },
}

fn load(common: &Common) -> Result<Config> {
    let mut config = Config::load(&common.config)?;
    if let Some(f) = common.forecast {
        config.mechanism.forecast = f;
    }
    if let Some(b) = common.buffer {
        config.buffer_slots = b;
    }
    Ok(config)
}

fn seeds(common: &Common, config: &Config) -> Vec<u64> {
    seed_range(common.seed.unwrap_or(config.scenario.seed), common.seeds)
}

fn days(config: &Config, seeds: &[u64], scenario: Option<&Path>) -> Result<Vec<SeededDay>> {
    let facilities = config.facilities();
    match scenario {
        Some(dir) => {
            let requests =
                File::open(dir.join("requests.csv")).with_context(|| format!("opening {}", dir.display()))?;
            let solar_path = dir.join("solar.csv");
            let solar = solar_path.exists().then(|| File::open(&solar_path)).transpose()?;
            let trace = read_trace_csv(
                BufReader::new(requests),
                solar.map(BufReader::new),
                &facilities,
                config.time_grid(),
            )?;
            Ok(trace_days(trace, seeds[0]))
        }
        None => Ok(scenario_days(&config.scenario, &facilities, config, seeds)?),
    }
}

fn summarize(r: &ExperimentReport) {
    let a = &r.aggregate;
    println!(
        "{:<9} days={} welfare/day={:.3} utility/day={:.3} cost/day={:.3} admitted/day={:.2} solar={:.3}",
        r.mode.name(),
        a.days,
        a.mean_welfare,
        a.mean_utility,
        a.mean_cost,
        a.mean_admitted,
        a.mean_solar_utilization
    );
    if let Some(ratio) = r.empirical_ratio {
        println!("empirical ratio {ratio:.6}");
    }
}

fn run_modes(common: &Common, modes: &[Mode], scenario: Option<&Path>) -> Result<bool> {
    let config = load(common)?;
    let seeds = seeds(common, &config);
    let days = days(&config, &seeds, scenario)?;
    let facilities = config.facilities();
    let mut reports = Vec::new();
    for &mode in modes {
        let r = run_days(&config, &facilities, mode, &seeds, &days)?;
        summarize(&r);
        reports.push(r);
    }
    write_reports(&reports, &common.out)?;
    let gap = reports.iter().map(|r| r.accounting_gap).fold(0.0, f64::max);
    if gap > ACCOUNTING_TOL {
        eprintln!("accounting identity off by {gap}");
        return Ok(false);
    }
    Ok(true)
}

fn verify(common: &Common) -> Result<bool> {
    let config = load(common)?;
    let mut spec = config.verify;
    if let Some(s) = common.seed {
        spec.first_seed = s;
    }
    if common.seeds > 1 {
        spec.instances = common.seeds;
    }
    let report = verify_bounds(&spec, &config.oracle)?;
    std::fs::create_dir_all(&common.out)?;
    serde_json::to_writer_pretty(File::create(common.out.join("verify.json"))?, &report)?;
    println!(
        "instances={} max_ratio={:.4} max_ratio/alpha_1={:.4} alpha_1 violations={} alpha_2 {}/{} alpha_3 {}/{} weak duality violations={} dual constraint instances={} ({} at arrival)",
        report.instances,
        report.max_ratio,
        report.max_ratio_over_alpha_1,
        report.alpha_1_violations,
        report.alpha_2_violations,
        report.alpha_2_checked,
        report.alpha_3_violations,
        report.alpha_3_checked,
        report.weak_duality_violations,
        report.constraint_violations,
        report.constraint_violations_at_arrival,
    );
    for f in report.failures.iter().take(10) {
        eprintln!("seed {}: {}: {}", f.seed, f.check, f.detail);
    }
    Ok(report.passed())
}

fn sweep(common: &Common) -> Result<bool> {
    let config = load(common)?;
    if config.investment.is_none() {
        bail!("{} has no [investment] section", common.config.display());
    }
    let report = investment_sweep(&config, common.seed.unwrap_or(config.scenario.seed))?;
    std::fs::create_dir_all(&common.out)?;
    write_sweep_csv(&report, File::create(common.out.join("investment.csv"))?)?;
    serde_json::to_writer_pretty(File::create(common.out.join("investment.json"))?, &report)?;
    if let Some(b) = &report.best {
        println!(
            "best: {} chargers x {} cables, welfare {:.0}, investment {:.0}, net {:.0} (interior: {})",
            b.evse_count,
            b.cables_per_evse,
            b.welfare,
            b.investment,
            b.net,
            report.interior_maximum()
        );
    }
    Ok(true)
}

fn generate(common: &Common) -> Result<bool> {
    let config = load(common)?;
    let params = ScenarioParams {
        seed: common.seed.unwrap_or(config.scenario.seed),
        ..config.scenario.clone()
    };
    let facilities = config.facilities();
    let trace = sample_scenario(&params, &facilities, config.time_grid())?;
    std::fs::create_dir_all(&common.out)?;
    write_requests_csv(&trace, File::create(common.out.join("requests.csv"))?)?;
    write_solar_csv(&trace, &facilities, File::create(common.out.join("solar.csv"))?)?;
    let users: usize = trace.days.iter().map(|d| d.users.len()).sum();
    println!(
        "{} days, {users} requests written to {}",
        trace.days.len(),
        common.out.display()
    );
    Ok(true)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match &cli.command {
        Command::Simulate { common, mode, scenario } => run_modes(common, &[*mode], scenario.as_deref()),
        Command::Compare { common, mode, scenario } => run_modes(common, mode, scenario.as_deref()),
        Command::VerifyBounds { common } => verify(common),
        Command::SweepInvestment { common } => sweep(common),
        Command::GenScenario { common } => generate(common),
    };
    match outcome {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
