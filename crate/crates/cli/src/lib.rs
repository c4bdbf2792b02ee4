//! Command-line front end for `melevy-core`.

pub mod commands;
pub mod config;
pub mod format;

use clap::{Parser, Subcommand};
use melevy_core::Error;

pub use config::{load_model, ConfigError, JumpConfig, JumpEntry, LoadedModel, ModelConfig};

/// Exit status for usage, parse and model validation errors.
pub const EXIT_USAGE: i32 = 2;
/// Exit status for an unknown verb.
pub const EXIT_UNKNOWN_VERB: i32 = 64;
/// Exit status for precondition violations reported by the library.
pub const EXIT_PRECONDITION: i32 = 3;
/// Exit status for failed checks and numerical failures.
pub const EXIT_FAILURE: i32 = 1;

/// Verb parameters: every field is an optional flag and may also be set in
/// the model file under a table named after the verb. Flags win.
macro_rules! params {
    ($name:ident { $($(#[$m:meta])* $f:ident : $t:ty),* $(,)? }) => {
        #[derive(Debug, Clone, Default, PartialEq, clap::Args, serde::Deserialize)]
        #[serde(default, deny_unknown_fields, rename_all = "kebab-case")]
        pub struct $name {
            $($(#[$m])* #[arg(long, allow_hyphen_values = true)] pub $f: Option<$t>,)*
        }

        impl $name {
            pub fn merged(self, file: Self) -> Self {
                Self { $($f: self.$f.or(file.$f),)* }
            }
        }
    };
}

params!(RootsArgs {
    /// Killing rate; 0 gives the limiting roots.
    s: f64,
});

params!(ExtremumArgs {
    /// Killing rate; 0 gives the absolute extremum.
    s: f64,
    /// Single evaluation point.
    x: f64,
    /// Evaluation grid lo:hi:n.
    xgrid: String,
});

params!(WhCheckArgs {
    s: f64,
    /// Smallest frequency (default 0.1).
    omega_min: f64,
    /// Largest frequency (default 50).
    omega_max: f64,
    /// Number of frequencies (default 200).
    points: usize,
    /// Pass threshold for the maximum residual (default 1e-8).
    tol: f64,
});

params!(OvershootArgs {
    /// Level x > 0.
    level: f64,
    /// Discount rate; 0 gives the undiscounted law.
    s: f64,
    /// Same as --s.
    discount: f64,
    /// Single overshoot value.
    x: f64,
    /// Overshoot grid lo:hi:n (default 0:5:51).
    xgrid: String,
});

params!(OccupationArgs {
    /// Killing rate; 0 gives the total sojourn time.
    s: f64,
    u: f64,
    x: f64,
    xgrid: String,
});

params!(LadderArgs {
    s: f64,
    /// Real part of the argument.
    r: f64,
    /// Imaginary part of the argument (default 0).
    r_im: f64,
});

params!(SimulateArgs {
    s: f64,
    paths: usize,
    seed: u64,
    /// inf_below:X, inf_zero, sup_above:X, sup_zero, occupation:L:U,
    /// overshoot_bin:L:LO:HI, overshoot_atom:L or passage:L (repeatable).
    functional: Vec<String>,
    /// Substeps per killed path when occupation times are requested.
    grid_steps: usize,
});

params!(ValidateArgs {
    /// Killing rate for the killed-law checks (default 1).
    s: f64,
    /// Threshold for the identity checks (default 1e-8).
    tol: f64,
});

#[derive(Debug, Parser)]
#[command(name = "melevy", version, about = "Fluctuation quantities of Lévy processes with matrix-exponential jumps")]
pub struct Cli {
    /// Model file, or builtin:NAME for a shipped example.
    #[arg(long, global = true)]
    pub model: Option<String>,
    #[command(subcommand)]
    pub verb: Verb,
}

#[derive(Debug, Subcommand)]
pub enum Verb {
    /// Roots of k(r) = s in both half-planes.
    Roots(RootsArgs),
    /// Law of the killed infimum.
    Infimum(ExtremumArgs),
    /// Law of the killed supremum.
    Supremum(ExtremumArgs),
    /// Residual of the Wiener-Hopf factorization on the imaginary axis.
    WhCheck(WhCheckArgs),
    /// Overshoot law over a level.
    Overshoot(OvershootArgs),
    /// Occupation-time transform E exp(-u * time spent above x).
    Occupation(OccupationArgs),
    /// Ladder exponent.
    Ladder(LadderArgs),
    /// Monte Carlo estimates of path functionals.
    Simulate(SimulateArgs),
    /// Runs the invariant suite.
    Validate(ValidateArgs),
    /// Lists the builtin models.
    Models,
}

impl Verb {
    pub fn name(&self) -> &'static str {
        match self {
            Verb::Roots(_) => "roots",
            Verb::Infimum(_) => "infimum",
            Verb::Supremum(_) => "supremum",
            Verb::WhCheck(_) => "wh-check",
            Verb::Overshoot(_) => "overshoot",
            Verb::Occupation(_) => "occupation",
            Verb::Ladder(_) => "ladder",
            Verb::Simulate(_) => "simulate",
            Verb::Validate(_) => "validate",
            Verb::Models => "models",
        }
    }
}

/// Failure of a command, carrying its exit status.
#[derive(Debug, Clone, PartialEq)]
pub struct Failure {
    pub code: i32,
    pub message: String,
}

impl Failure {
    pub fn usage(message: impl Into<String>) -> Failure {
        Failure {
            code: EXIT_USAGE,
            message: message.into(),
        }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Failure {
        let code = match e {
            Error::Precondition(_) | Error::OutsideDomain(_) | Error::Unsupported(_) => EXIT_PRECONDITION,
            Error::InvalidJumpSpec(_) | Error::NonPositiveRate(_) | Error::InvalidModel(_) => EXIT_USAGE,
            Error::RootFinding(_) | Error::Numerical(_) | Error::Consistency(_) => EXIT_FAILURE,
        };
        Failure {
            code,
            message: e.to_string(),
        }
    }
}

impl From<ConfigError> for Failure {
    fn from(e: ConfigError) -> Failure {
        Failure::usage(e.message)
    }
}

/// Output of a successful command. `passed` is false when a check verb found
/// a violation; the CSV is still printed.
#[derive(Debug, Clone, PartialEq)]
pub struct Outcome {
    pub csv: String,
    pub passed: bool,
}

/// Runs a parsed command line.
pub fn run(cli: Cli) -> Result<Outcome, Failure> {
    commands::dispatch(cli)
}

/// Parses `args` (including the program name), runs the command, writes CSV
/// to stdout and diagnostics to stderr, and returns the exit status.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                ErrorKind::InvalidSubcommand => EXIT_UNKNOWN_VERB,
                _ => EXIT_USAGE,
            };
            let _ = e.print();
            return code;
        }
    };
    match run(cli) {
        Ok(out) => {
            print!("{}", out.csv);
            if out.passed {
                0
            } else {
                EXIT_FAILURE
            }
        }
        Err(f) => {
            eprintln!("error: {}", f.message);
            f.code
        }
    }
}

/// Sizes the global worker pool from `ME_LEVY_THREADS` when it is set.
pub fn configure_threads() -> Result<(), Failure> {
    let Ok(value) = std::env::var("ME_LEVY_THREADS") else {
        return Ok(());
    };
    let n: usize = value
        .trim()
        .parse()
        .ok()
        .filter(|n| *n > 0)
        .ok_or_else(|| Failure::usage(format!("ME_LEVY_THREADS must be a positive integer (got '{value}')")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| Failure::usage(format!("cannot size the worker pool: {e}")))
}
