use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Context;
use clap::{Parser, Subcommand};
use sigrt::artifacts;
use sigrt::scenarios;
use sigrt::{inspect, run_scenario, Config, ScenarioKind};
use sigrt_core::explorer::{explore, Mode};
use sigrt_core::Enforcement;

#[derive(Parser)]
#[command(name = "sigrt", version, about = "Run signalling-model scenarios and explore interleavings")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a bundled scenario and write its artifacts.
    Run {
        /// trader, seats, elevator, pipeline, or a script file path
        scenario: String,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, value_parser = ["on", "off"])]
        enforcement: Option<String>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Summarize an artifact directory.
    Inspect { dir: PathBuf },
    /// Explore a bundled script or script file and print one line per interleaving.
    Explore {
        script: String,
        #[arg(long, default_value = "exhaustive")]
        mode: String,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, value_parser = ["on", "off"], default_value = "on")]
        enforcement: String,
    },
}

const EXIT_CHECK: u8 = 1;
const EXIT_CONFIG: u8 = 2;

fn build_config(
    scenario: &str,
    file: Option<&PathBuf>,
    seed: Option<u64>,
    enforcement: Option<&str>,
    out: Option<&PathBuf>,
) -> Result<Config, sigrt::ConfigError> {
    let kind = match scenario {
        "trader" => ScenarioKind::Trader,
        "seats" => ScenarioKind::Seats,
        "elevator" => ScenarioKind::Elevator,
        "pipeline" => ScenarioKind::Pipeline,
        path => ScenarioKind::Script(PathBuf::from(path)),
    };
    let mut c = Config::new(kind);
    if let Some(f) = file {
        c.apply_file(f)?;
    }
    c.apply_env(std::env::vars())?;
    if let Some(s) = seed {
        c.seed = s;
    }
    if let Some(e) = enforcement {
        c.set("--enforcement", "enforcement", e)?;
    }
    if let Some(o) = out {
        c.out = o.clone();
    }
    c.validate()?;
    Ok(c)
}

fn run(config: Config) -> anyhow::Result<ExitCode> {
    let result = match run_scenario(&config) {
        Ok(r) => r,
        // an unreadable or oversized script is a configuration problem
        Err(e) => {
            eprintln!("config error: {:#}", anyhow::Error::from(e));
            return Ok(ExitCode::from(EXIT_CONFIG));
        }
    };
    artifacts::write(&config.out, &config, &result)
        .with_context(|| format!("writing artifacts to {}", config.out.display()))?;
    for c in &result.checks {
        println!("{} {}: {}", if c.passed { "PASS" } else { "FAIL" }, c.name, c.detail);
    }
    if let Some(c) = result.failed().next() {
        eprintln!("failing check: {}", c.name);
        return Ok(ExitCode::from(EXIT_CHECK));
    }
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Run { scenario, config, seed, enforcement, out } => {
            match build_config(&scenario, config.as_ref(), seed, enforcement.as_deref(), out.as_ref()) {
                Ok(c) => run(c),
                Err(e) => {
                    eprintln!("config error: {e}");
                    return ExitCode::from(EXIT_CONFIG);
                }
            }
        }
        Command::Inspect { dir } => inspect(&dir)
            .map(|s| {
                print!("{s}");
                ExitCode::SUCCESS
            })
            .map_err(Into::into),
        Command::Explore { script, mode, seed, enforcement: e } => {
            let mode = match mode.parse::<Mode>() {
                Ok(Mode::Sampled { n, .. }) => Mode::Sampled { n, seed },
                Ok(m) => m,
                Err(msg) => {
                    eprintln!("config error: {msg}");
                    return ExitCode::from(EXIT_CONFIG);
                }
            };
            let e = if e == "on" { Enforcement::on() } else { Enforcement::off() };
            scenarios::load_script(&script)
                .map_err(anyhow::Error::from)
                .and_then(|s| explore(&s, mode, e).map_err(Into::into))
                .map(|outs| {
                    print!("{}", scenarios::dump_outcomes(&outs));
                    let bad = outs.iter().filter(|o| !o.is_clean()).count();
                    eprintln!("{} interleavings, {bad} anomalous", outs.len());
                    ExitCode::SUCCESS
                })
        }
    };
    match outcome {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(EXIT_CHECK)
        }
    }
}
