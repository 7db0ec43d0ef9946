use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use dptr::pipeline::aggregate::find_mean;
use dptr::pipeline::config::{EvaluateConfig, OutputConfig, RunConfig};
use dptr::pipeline::run::{evaluate, simulate, RunOutput};
use dptr::pooling::{oracle_beta, oracle_beta_personalized, OracleParams};
use dptr::selftest::{self, Options, Preset, CRITERIA};
use dptr::{Error, Result};

#[derive(Parser)]
#[command(name = "dptr", version, about = "Data-pooling treatment roll-out: simulation, evaluation and decision tools")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a synthetic simulation sweep.
    Simulate {
        /// TOML run config; built-in defaults when omitted.
        #[arg(long)]
        config: Option<PathBuf>,
        #[command(flatten)]
        common: Common,
    },
    /// Evaluate methods on a real dataset by repeated subsampling.
    Evaluate {
        #[arg(long)]
        config: PathBuf,
        /// Overrides `input` in the config.
        #[arg(long)]
        input: Option<String>,
        #[command(flatten)]
        common: Common,
    },
    /// Print the oracle shrinkage parameter for known model parameters.
    OracleBeta {
        #[arg(long, default_value_t = 1.0)]
        tau0: f64,
        #[arg(long, default_value_t = 3.0)]
        sigma0: f64,
        #[arg(long, default_value_t = 3.0)]
        sigma: f64,
        #[arg(long, default_value_t = 10.0)]
        n: f64,
        #[arg(long, default_value_t = 0.05)]
        alpha: f64,
        /// Design factor for the personalized value; the default 2 gives
        /// the shared value of a balanced two-arm design.
        #[arg(long)]
        b: Option<f64>,
    },
    /// Run the acceptance property suite.
    Selftest {
        /// Full presets instead of the reduced ones.
        #[arg(long)]
        full: bool,
        /// Comma-separated criterion numbers.
        #[arg(long, value_delimiter = ',')]
        only: Vec<u8>,
        #[arg(long, default_value_t = 1)]
        parallelism: usize,
    },
}

#[derive(Args)]
struct Common {
    /// Output directory.
    #[arg(long)]
    out: Option<String>,
    #[arg(long)]
    run_id: Option<String>,
    #[arg(long)]
    parallelism: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    replications: Option<usize>,
}

impl Common {
    fn apply(&self, output: &mut OutputConfig, parallelism: &mut usize, seed: &mut u64, reps: &mut usize) {
        if let Some(d) = &self.out {
            output.dir = d.clone();
        }
        if let Some(id) = &self.run_id {
            output.run_id = id.clone();
        }
        if let Some(p) = self.parallelism {
            *parallelism = p;
        }
        if let Some(s) = self.seed {
            *seed = s;
        }
        if let Some(r) = self.replications {
            *reps = r;
        }
    }
}

fn read(path: &PathBuf) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
}

fn report(out: &RunOutput) {
    for cell in &out.results.cells {
        let label = if cell.label.is_empty() { "all" } else { &cell.label };
        for &m in &out.results.methods {
            let or = find_mean(&out.aggregates, cell.id, m, "or").map_or("-".into(), |v| format!("{v:.4}"));
            println!("cell {} ({label}) {:<11} mean OR {or}", cell.id, m.name());
        }
    }
    let failed: usize = out.manifest.exclusions.failed_replications.values().sum();
    if failed > 0 {
        eprintln!("warning: {failed} replications failed; see error_tag");
    }
    println!("wrote {}", out.paths.replications.display());
    println!("wrote {}", out.paths.aggregate.display());
    println!("wrote {}", out.paths.manifest.display());
}

fn execute(cli: Cli, command_line: &str) -> Result<bool> {
    match cli.command {
        Command::Simulate { config, common } => {
            let mut cfg = match config {
                Some(p) => RunConfig::from_toml(&read(&p)?)?,
                None => RunConfig::default(),
            };
            common.apply(&mut cfg.output, &mut cfg.parallelism, &mut cfg.master_seed, &mut cfg.replications);
            report(&simulate(&cfg, command_line)?);
        }
        Command::Evaluate { config, input, common } => {
            let mut cfg = EvaluateConfig::from_toml(&read(&config)?)?;
            if let Some(i) = input {
                cfg.input = i;
            }
            common.apply(&mut cfg.output, &mut cfg.parallelism, &mut cfg.seed, &mut cfg.replications);
            report(&evaluate(&cfg, command_line)?);
        }
        Command::OracleBeta {
            tau0,
            sigma0,
            sigma,
            n,
            alpha,
            b,
        } => {
            let p = OracleParams {
                tau0,
                sigma0_sq: sigma0 * sigma0,
                sigma_sq: sigma * sigma,
                n,
                alpha,
            };
            match b {
                Some(b) => println!("{}", oracle_beta_personalized(&p, b)?),
                None => println!("{}", oracle_beta(&p)?),
            }
        }
        Command::Selftest {
            full,
            only,
            parallelism,
        } => {
            let opts = Options {
                preset: if full { Preset::Full } else { Preset::Reduced },
                parallelism: parallelism.max(1),
                ..Options::default()
            };
            let ids = if only.is_empty() { CRITERIA.to_vec() } else { only };
            let outcomes = selftest::run(&ids, &opts, std::io::stdout())?;
            return Ok(outcomes.iter().all(|o| o.passed));
        }
    }
    Ok(true)
}

fn main() -> ExitCode {
    let args: Vec<String> = std::env::args().collect();
    let cli = match Cli::try_parse_from(&args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match execute(cli, &args.join(" ")) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
