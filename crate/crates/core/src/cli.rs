//! Command-line entry point.

use std::ffi::OsString;
use std::io::Write;
use std::path::PathBuf;

use clap::error::ErrorKind;
use clap::Parser;

use crate::check::{run_checks, EXIT_CHECK_FAILED};
use crate::config::{load_config, SimConfig};
use crate::sim::{run, EXIT_CONFIG, EXIT_DYNAMICS, EXIT_OK};

/// Exit status for command-line usage errors.
pub const EXIT_USAGE: i32 = 64;

#[derive(Debug, Parser)]
#[command(
    name = "rotary-coverage",
    version,
    about = "Rotary-pointer coverage control simulator"
)]
pub struct Args {
    /// JSON run configuration.
    #[arg(long)]
    pub config: PathBuf,
    /// Output directory.
    #[arg(long, default_value = "./out")]
    pub out: PathBuf,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long = "t-final")]
    pub t_final: Option<f64>,
    #[arg(long)]
    pub dt: Option<f64>,
    #[arg(long = "emit-every")]
    pub emit_every: Option<usize>,
    /// Run the invariant suite on the configured region and density, then exit.
    #[arg(long)]
    pub check: bool,
}

impl Args {
    /// Command-line values take precedence over the file.
    pub fn apply(&self, config: &mut SimConfig) {
        if let Some(seed) = self.seed {
            config.seed = seed;
        }
        if let Some(t) = self.t_final {
            config.integrator.t_final = t;
        }
        if let Some(dt) = self.dt {
            config.integrator.dt = dt;
        }
        if let Some(n) = self.emit_every {
            config.emit_every = n;
        }
    }
}

/// Loads the file named by `args` and applies the overrides.
pub fn resolve_config(args: &Args) -> Result<SimConfig, crate::config::ConfigError> {
    let mut config = load_config(&args.config)?;
    args.apply(&mut config);
    config.validate()?;
    Ok(config)
}

pub fn cli_main<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let args = match Args::try_parse_from(argv) {
        Ok(a) => a,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => EXIT_OK,
                _ => EXIT_USAGE,
            };
        }
    };
    let config = match resolve_config(&args) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return EXIT_CONFIG;
        }
    };
    if args.check {
        return check(&config);
    }
    match run(&config, &args.out) {
        Ok(summary) => {
            println!(
                "completed t = {} in {} steps; consensus {}",
                summary.final_state.time,
                summary.steps,
                summary.consensus.last().copied().unwrap_or(false)
            );
            EXIT_OK
        }
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

fn check(config: &SimConfig) -> i32 {
    let built = config
        .boundary()
        .and_then(|b| Ok((b, config.density()?, config.model()?)));
    let (boundary, density, model) = match built {
        Ok(x) => x,
        Err(e) => {
            eprintln!("error: {e}");
            return EXIT_CONFIG;
        }
    };
    let results = match run_checks(&boundary, &density, &model.quadrature, config.seed) {
        Ok(r) => r,
        Err(e) => {
            eprintln!("error: {e}");
            return EXIT_DYNAMICS;
        }
    };
    let mut out = std::io::stdout().lock();
    for r in &results {
        let _ = writeln!(out, "{}", r.line());
    }
    if results.iter().all(|r| r.passed) {
        EXIT_OK
    } else {
        EXIT_CHECK_FAILED
    }
}
