//! Command-line front end: load a scenario, build its system, answer the
//! queries, and write a deterministic report.
//!
//! Exit codes: 0 when every verdict passes, 1 when any check or query
//! fails (the report carries replayable witnesses), 2 on configuration or
//! resource errors.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use runsys::runner::{export_graph, list_suites, run_scenario, RunFlags};
use runsys::scenario::{
    load_scenario, ByzantineParams, CoordAttackParams, Limits, OutputPaths, QueryDef,
    ScenarioConfig, SuiteKind,
};
use runsys::{Error, Result};

#[derive(Parser)]
#[command(
    name = "runsys",
    version,
    about = "Builds runs-and-systems models and answers knowledge queries about them"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone, Debug, Default)]
struct CommonFlags {
    /// State budget for system generation; overrides RUNSYS_BUDGET and the
    /// config's limit.
    #[arg(long)]
    budget: Option<usize>,
    /// Worker threads for generation (affects timing only, never output).
    #[arg(long)]
    workers: Option<usize>,
    /// Write the report here instead of the config's output path.
    #[arg(long)]
    report: Option<PathBuf>,
    /// Assert that the run uses no randomness.
    #[arg(long)]
    seedless: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Run a scenario file and print its report.
    Run {
        #[arg(long)]
        config: PathBuf,
        #[command(flatten)]
        flags: CommonFlags,
    },
    /// Write the indistinguishability graph of a scenario's system.
    ExportGraph {
        #[arg(long)]
        config: PathBuf,
        /// Output path; defaults to the config's [output].graph.
        #[arg(long)]
        out: Option<PathBuf>,
        #[command(flatten)]
        flags: CommonFlags,
    },
    /// List the built-in suites.
    ListSuites,
    /// Run a messenger scenario without a config file.
    CoordAttack {
        #[arg(long, default_value_t = 2)]
        transits: usize,
        #[arg(long)]
        horizon: Option<usize>,
        /// never | send-receive | on-delivery.
        #[arg(long, default_value = "never")]
        attack_rule: String,
        #[arg(long)]
        reliable: bool,
        #[command(flatten)]
        flags: CommonFlags,
    },
    /// Run an agreement scenario without a config file.
    Byzantine {
        #[arg(long)]
        n: usize,
        #[arg(long)]
        t: usize,
        /// crash | omission | byzantine.
        #[arg(long, default_value = "crash")]
        failures: String,
        #[arg(long)]
        horizon: Option<usize>,
        /// any-attack | always-retreat.
        #[arg(long, default_value = "any-attack")]
        rule: String,
        #[arg(long)]
        claim_bound: Option<usize>,
        /// lower-bound: trace when "someone preferred attack" becomes
        /// common knowledge among the nonfaulty.
        #[arg(long)]
        experiment: Option<String>,
        #[command(flatten)]
        flags: CommonFlags,
    },
}

fn env_budget() -> Result<Option<usize>> {
    match std::env::var("RUNSYS_BUDGET") {
        Ok(s) => s
            .trim()
            .parse::<usize>()
            .map(Some)
            .map_err(|_| Error::Config(format!("RUNSYS_BUDGET is not a number: {s}"))),
        Err(std::env::VarError::NotPresent) => Ok(None),
        Err(e) => Err(Error::Config(format!("RUNSYS_BUDGET: {e}"))),
    }
}

fn run_flags(common: &CommonFlags) -> Result<RunFlags> {
    Ok(RunFlags {
        budget: common.budget.or(env_budget()?),
        workers: common.workers,
        seedless: common.seedless,
        report_to: common.report.clone(),
    })
}

fn bare_config(suite: SuiteKind) -> ScenarioConfig {
    ScenarioConfig {
        name: None,
        suite,
        coord_attack: None,
        byzantine: None,
        game: None,
        custom: None,
        event: Vec::new(),
        query: Vec::new(),
        limits: Limits::default(),
        output: OutputPaths::default(),
    }
}

fn execute(cfg: &ScenarioConfig, flags: &RunFlags) -> Result<bool> {
    let outcome = run_scenario(cfg, flags)?;
    print!("{}", outcome.report.render());
    if let Some(path) = &outcome.report_path {
        eprintln!("report written to {}", path.display());
    }
    Ok(outcome.pass)
}

fn dispatch(cli: Cli) -> Result<bool> {
    match cli.command {
        Command::Run { config, flags } => {
            let cfg = load_scenario(&config)?;
            execute(&cfg, &run_flags(&flags)?)
        }
        Command::ExportGraph { config, out, flags } => {
            let cfg = load_scenario(&config)?;
            let path = export_graph(&cfg, &run_flags(&flags)?, out.as_deref())?;
            println!("wrote {}", path.display());
            Ok(true)
        }
        Command::ListSuites => {
            let suites = list_suites();
            let width = suites.iter().map(|(n, _)| n.len()).max().unwrap_or(0);
            for (name, blurb) in suites {
                println!("{name:width$}  {blurb}");
            }
            Ok(true)
        }
        Command::CoordAttack {
            transits,
            horizon,
            attack_rule,
            reliable,
            flags,
        } => {
            let mut cfg = bare_config(SuiteKind::CoordAttack);
            cfg.coord_attack = Some(CoordAttackParams {
                transits,
                horizon,
                reliable,
                attack_rule: Some(attack_rule),
            });
            // The headline fact either way: with a lossy messenger, delivery
            // never becomes common knowledge; with a reliable one it does.
            cfg.query.push(QueryDef {
                name: Some("ck-delivered".into()),
                expr: "C({1,2}, delivered)".into(),
                expect: Some(if reliable { "nonempty" } else { "empty" }.into()),
                run: None,
                time: None,
            });
            execute(&cfg, &run_flags(&flags)?)
        }
        Command::Byzantine {
            n,
            t,
            failures,
            horizon,
            rule,
            claim_bound,
            experiment,
            flags,
        } => {
            let mut cfg = bare_config(SuiteKind::Byzantine);
            cfg.byzantine = Some(ByzantineParams {
                n,
                t,
                failures,
                horizon,
                rule,
                claim_bound,
                checks: true,
                experiment,
            });
            execute(&cfg, &run_flags(&flags)?)
        }
    }
}

fn main() -> ExitCode {
    match dispatch(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
