//! Command-line front end for `disorder-core`.

pub mod commands;
pub mod config;
pub mod error;

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

use crate::commands::Context;
use crate::config::{parse_elements_flag, parse_grid_flag, ElementList, FileConfig, Overrides};
use crate::error::CliError;

const AFTER_HELP: &str = "\
Defaults:
  eta            0 when every site is disordered, 1e-3*gamma otherwise
                 (closed-form cavity spectra: 0); Monte-Carlo eta 0.02
  grid           spectrum +- 40*gamma, 4001 points (201 for mc-compare,
                 40001 for sum-rules)
  prominence     1% of the curve maximum
  seed           42
  samples        10000
  alpha, beta    0, 1 (Hueckel); gamma 0.1

Outputs:
  dos         CSV omega,rho_total,rho_site_k[,re_G_i_j,im_G_i_j] + JSON summary
  cavity      CSV omega,rho_c,delta_rho_m,delta_rho_t[,alpha_*] + JSON poles
  mc-compare  CSV omega,element,re_mean,im_mean,re_stderr,im_stderr + JSON
  sum-rules   JSON of integrals with pass/fail
  The JSON summary sits next to the CSV with a .json extension and echoes
  the effective configuration.

Exit codes:
  0  success
  2  usage or configuration error
  3  I/O error
  4  model or numerical failure
  5  a sum-rule check failed";

#[derive(Debug, Parser)]
#[command(
    name = "disorder",
    version,
    about = "Disorder-averaged Green's functions, densities of states and cavity polariton spectra",
    after_help = AFTER_HELP
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Total and per-site density of states for a graph or cavity model.
    Dos(CommonArgs),
    /// Closed-form cavity spectra, absorption and polariton poles.
    Cavity(CommonArgs),
    /// Monte-Carlo disorder average compared against the exact result.
    McCompare(CommonArgs),
    /// Check spectral sum rules.
    SumRules(CommonArgs),
}

#[derive(Debug, Clone, Args)]
pub struct CommonArgs {
    /// TOML configuration file.
    #[arg(long, value_name = "PATH")]
    pub config: Option<PathBuf>,
    /// Output file (CSV, or JSON for sum-rules).
    #[arg(long, value_name = "PATH")]
    pub out: Option<PathBuf>,
    /// Frequency grid as lo:hi:n (eV).
    #[arg(long, value_name = "LO:HI:N", value_parser = parse_grid_flag, allow_hyphen_values = true)]
    pub grid: Option<(f64, f64, usize)>,
    /// Positive infinitesimal added to the frequency.
    #[arg(long)]
    pub eta: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Monte-Carlo sample count.
    #[arg(long)]
    pub samples: Option<usize>,
    /// Suppress progress output on stderr.
    #[arg(long, short)]
    pub quiet: bool,

    /// Model shorthand: chain:N, ring:N, star:N, complete:N or cavity.
    #[arg(long, value_name = "KIND[:N]")]
    pub model: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    pub alpha: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    pub beta: Option<f64>,
    /// Cauchy half-width (eV).
    #[arg(long)]
    pub gamma: Option<f64>,
    /// Matrix elements to report, e.g. 0-0,0-1.
    #[arg(long, value_parser = parse_elements_flag)]
    pub elements: Option<ElementList>,
    /// Monte-Carlo distribution: cauchy, gaussian or uniform.
    #[arg(long)]
    pub distribution: Option<String>,
    /// Monte-Carlo distribution scale (defaults to gamma).
    #[arg(long)]
    pub scale: Option<f64>,

    /// Cavity mode energy (eV).
    #[arg(long, allow_hyphen_values = true)]
    pub eps_c: Option<f64>,
    /// Molecular excitation energy (eV).
    #[arg(long, allow_hyphen_values = true)]
    pub eps_a: Option<f64>,
    /// Molecular number density (m^-3).
    #[arg(long)]
    pub density: Option<f64>,
    /// Volume-scaled coupling (eV m^3/2).
    #[arg(long)]
    pub v_tilde: Option<f64>,
    /// Molecule count.
    #[arg(long)]
    pub molecules: Option<usize>,
    /// Per-molecule coupling V (eV).
    #[arg(long)]
    pub coupling: Option<f64>,
    /// Transition dipole (Debye).
    #[arg(long)]
    pub mu: Option<f64>,
}

impl CommonArgs {
    fn context(&self) -> Result<Context, CliError> {
        let file = match &self.config {
            Some(p) => FileConfig::load(p)?,
            None => FileConfig::default(),
        };
        let overrides = Overrides {
            out: self.out.clone(),
            grid: self.grid,
            eta: self.eta,
            seed: self.seed,
            samples: self.samples,
            model: self.model.clone(),
            alpha: self.alpha,
            beta: self.beta,
            gamma: self.gamma,
            eps_c: self.eps_c,
            eps_a: self.eps_a,
            density: self.density,
            v_tilde: self.v_tilde,
            molecules: self.molecules,
            coupling: self.coupling,
            mu: self.mu,
            elements: self.elements.clone().map(|e| e.0),
            distribution: self.distribution.clone(),
            scale: self.scale,
        };
        Ok(Context {
            file,
            overrides,
            quiet: self.quiet,
        })
    }
}

/// Parse `args` (including the program name) and run.
pub fn run_from<I, T>(args: I) -> Result<(), CliError>
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = Cli::try_parse_from(args).map_err(|e| CliError::Config(e.to_string()))?;
    run(cli)
}

pub fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Dos(a) => commands::dos(&a.context()?),
        Command::Cavity(a) => commands::cavity_spectra(&a.context()?),
        Command::McCompare(a) => commands::mc_compare(&a.context()?),
        Command::SumRules(a) => commands::sum_rules(&a.context()?),
    }
}
