use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};

use diana_cli::config::{self, Loaded};
use diana_cli::output::{out_dir, write_json, OUT_DIR_ENV};
use diana_cli::{run, sweep, theory, Failure, VERSION};

#[derive(Parser)]
#[command(name = "diana", version = VERSION, about = "Distributed SGD with quantized gradient differences")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run every seed of one configuration.
    Run(Common),
    /// Run the cross product of the [sweep] grid.
    Sweep(Common),
    /// Print parameters, admissibility checks and the bound curve.
    Theory(Common),
}

#[derive(Args)]
struct Common {
    /// TOML experiment file.
    #[arg(long, value_name = "PATH")]
    config: PathBuf,
    /// Output directory; overrides the environment and the config.
    #[arg(long, value_name = "DIR")]
    out: Option<PathBuf>,
    /// Refuse parameters outside the admissible range of the analysis.
    #[arg(long)]
    strict: bool,
    /// Worker threads for seeds and sweep cells.
    #[arg(long, value_name = "N")]
    threads: Option<usize>,
    /// Added to every seed.
    #[arg(long, value_name = "K", default_value_t = 0)]
    seed_offset: u64,
}

impl Common {
    fn setup(&self) -> Result<Loaded> {
        if let Some(n) = self.threads {
            rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build_global()
                .context("configuring the thread pool")?;
        }
        Ok(config::load(&self.config)?)
    }

    fn dir(&self, loaded: &Loaded) -> PathBuf {
        out_dir(self.out.as_deref(), loaded.config.run.out.as_deref())
    }
}

fn cmd_run(args: &Common) -> Result<()> {
    let loaded = args.setup()?;
    let exp = config::resolve(&loaded, args.seed_offset)?;
    if args.strict && !exp.validation.validated {
        return Err(Failure::Validation(exp.validation.failures().join("; ")).into());
    }
    if !exp.validation.validated {
        log::warn!(
            "unvalidated parameters: {}",
            exp.validation.failures().join("; ")
        );
    }
    let dir = args.dir(&loaded);
    let runs = run::execute(&exp)?;
    run::write_outputs(&dir, &exp, &runs, args.seed_offset)?;
    let diverged: Vec<u64> = runs.iter().filter(|r| r.diverged).map(|r| r.seed).collect();
    if !diverged.is_empty() {
        return Err(
            Failure::Diverged(format!("seeds {diverged:?}; outputs in {}", dir.display())).into(),
        );
    }
    println!("wrote {}", dir.display());
    Ok(())
}

fn cmd_sweep(args: &Common) -> Result<()> {
    let loaded = args.setup()?;
    let dir = args.dir(&loaded);
    let outcome = sweep::sweep(&loaded, &dir, args.seed_offset, args.strict)?;
    for row in outcome.rows.iter().filter(|r| r.status == "failed") {
        log::warn!("cell {} failed: {}", row.cell, row.message);
    }
    println!("wrote {} cells to {}", outcome.rows.len(), dir.display());
    if outcome.failed > 0 {
        return Err(Failure::Config(format!(
            "{} of {} cells failed",
            outcome.failed,
            outcome.rows.len()
        ))
        .into());
    }
    if outcome.diverged > 0 {
        return Err(Failure::Diverged(format!(
            "{} of {} cells",
            outcome.diverged,
            outcome.rows.len()
        ))
        .into());
    }
    Ok(())
}

fn cmd_theory(args: &Common) -> Result<()> {
    let loaded = args.setup()?;
    let exp = config::resolve(&loaded, args.seed_offset)?;
    let report = theory::report(&exp)?;
    print!("{}", theory::render(&report));
    if args.out.is_some() || std::env::var_os(OUT_DIR_ENV).is_some() {
        write_json(&args.dir(&loaded).join("theory.json"), &report)?;
    }
    if args.strict && !exp.validation.validated {
        return Err(Failure::Validation(exp.validation.failures().join("; ")).into());
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Run(a) => cmd_run(a),
        Command::Sweep(a) => cmd_sweep(a),
        Command::Theory(a) => cmd_theory(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(e.downcast_ref::<Failure>().map_or(1, Failure::exit_code))
        }
    }
}
