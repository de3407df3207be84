//! Command-line front end: `fit`, `simulate` and `score`.

pub mod error;
pub mod fit;
pub mod io;
pub mod score;
pub mod simulate;

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use ofmfa::selection::Criterion;
use ofmfa::synthgen::{MeanBranch, Scenario, SynthSpec};
use ofmfa::tempering::RunConfig;
use ofmfa::SigmaMode;

use crate::error::{CliError, CliResult};
use crate::fit::{FitConfig, FitOutcome, FitRequest, Manifest, TraceFormat};
use crate::io::HeaderMode;

#[derive(Debug, Parser)]
#[command(name = "ofmfa", version, about = "Overfitting Bayesian mixtures of factor analyzers")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Fit a grid of models, select one and write the posterior summaries.
    Fit(FitArgs),
    /// Generate a synthetic dataset with known clusters.
    Simulate(SimulateArgs),
    /// Rand and adjusted Rand index between two labelings.
    Score(ScoreArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SigmaChoice {
    PerComponent,
    Shared,
    Both,
}

impl SigmaChoice {
    fn modes(self) -> Vec<SigmaMode> {
        match self {
            SigmaChoice::PerComponent => vec![SigmaMode::PerComponent],
            SigmaChoice::Shared => vec![SigmaMode::Shared],
            SigmaChoice::Both => vec![SigmaMode::PerComponent, SigmaMode::Shared],
        }
    }
}

#[derive(Debug, Args)]
pub struct FitArgs {
    /// Numeric CSV, one observation per row.
    #[arg(long, required_unless_present = "manifest")]
    pub input: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = HeaderMode::Auto)]
    pub header: HeaderMode,
    /// Output directory.
    #[arg(long, env = "OFMFA_OUT_DIR")]
    pub out: PathBuf,
    /// Re-run the request recorded in a previous manifest.json. All model
    /// and sampler flags are then taken from the manifest.
    #[arg(long, conflicts_with = "input")]
    pub manifest: Option<PathBuf>,
    /// Number of components of the overfitting mixture.
    #[arg(long, default_value_t = 20)]
    pub k: usize,
    /// Factor counts to try, e.g. `1,2,3`, `1-5` or `0..10`.
    #[arg(long, default_value = "1-5", value_parser = parse_q_grid)]
    pub q_grid: QGrid,
    #[arg(long, value_enum, default_value_t = SigmaChoice::Both)]
    pub sigma_mode: SigmaChoice,
    /// Number of tempered chains.
    #[arg(long, default_value_t = 8)]
    pub chains: usize,
    /// Spacing of the Dirichlet concentration ladder.
    #[arg(long, default_value_t = 1.0)]
    pub delta: f64,
    /// Dirichlet concentration of the target chain.
    #[arg(long, default_value_t = 1.0)]
    pub gamma: f64,
    #[arg(long, default_value_t = 0.5)]
    pub alpha: f64,
    #[arg(long, default_value_t = 0.5)]
    pub beta: f64,
    #[arg(long, default_value_t = 0.5)]
    pub g: f64,
    #[arg(long, default_value_t = 0.5)]
    pub h: f64,
    #[arg(long, default_value_t = 20_000)]
    pub iterations: usize,
    /// Defaults to 5000, capped at a quarter of the run.
    #[arg(long)]
    pub burnin: Option<usize>,
    #[arg(long, default_value_t = 10)]
    pub thin: usize,
    #[arg(long, default_value_t = 10)]
    pub swap_every: usize,
    /// Sweeps of the overdispersed warm start.
    #[arg(long, default_value_t = 100)]
    pub warm: usize,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    #[arg(long, default_value = "bic", value_parser = parse_criterion)]
    pub criterion: Criterion,
    /// Worker threads; defaults to the number of available cores.
    #[arg(long)]
    pub workers: Option<usize>,
    /// Permit factor counts above the Ledermann bound.
    #[arg(long)]
    pub allow_above_ledermann: bool,
    #[arg(long, value_enum, default_value_t = TraceFormat::Csv)]
    pub trace_format: TraceFormat,
    /// Independent runs of the selected model used for convergence
    /// diagnostics.
    #[arg(long, default_value_t = 1)]
    pub replicates: usize,
    /// Known labels to compare the estimated clustering against.
    #[arg(long)]
    pub truth: Option<PathBuf>,
    #[arg(long)]
    pub truth_column: Option<String>,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[arg(long, default_value_t = 3)]
    pub k: usize,
    #[arg(long, default_value_t = 2)]
    pub q: usize,
    #[arg(long, default_value_t = 500)]
    pub n: usize,
    #[arg(long, default_value_t = 20)]
    pub p: usize,
    /// s1, s2 or s3.
    #[arg(long, default_value = "s1", value_parser = parse_scenario)]
    pub scenario: Scenario,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    /// per-entry or per-row.
    #[arg(long, default_value = "per-entry", value_parser = parse_mean_branch)]
    pub mean_branch: MeanBranch,
    #[arg(long, env = "OFMFA_OUT_DIR")]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct ScoreArgs {
    /// CSV with a z_map, label or true_z column (or labels in the first
    /// column), or a JSON file with a `true_z` array.
    #[arg(long)]
    pub predicted: PathBuf,
    #[arg(long)]
    pub truth: PathBuf,
    #[arg(long)]
    pub predicted_column: Option<String>,
    #[arg(long)]
    pub truth_column: Option<String>,
}

/// Distinct factor counts in the order given.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct QGrid(pub Vec<usize>);

/// Parses `1,2,3`, `1-5`, `0..10` or any comma-separated mix of them.
pub fn parse_q_grid(s: &str) -> Result<QGrid, String> {
    let num = |t: &str| t.trim().parse::<usize>().map_err(|_| format!("'{t}' is not a factor count"));
    let mut out = Vec::new();
    for part in s.split(',').filter(|t| !t.trim().is_empty()) {
        let range = part.split_once("..").or_else(|| part.split_once('-'));
        match range {
            Some((a, b)) => {
                let (a, b) = (num(a)?, num(b.trim_start_matches('='))?);
                if a > b {
                    return Err(format!("empty range '{part}'"));
                }
                out.extend(a..=b);
            }
            None => out.push(num(part)?),
        }
    }
    if out.is_empty() {
        return Err("the q grid is empty".into());
    }
    let mut seen = std::collections::BTreeSet::new();
    out.retain(|q| seen.insert(*q));
    Ok(QGrid(out))
}

fn parse_criterion(s: &str) -> Result<Criterion, String> {
    s.parse().map_err(|e: ofmfa::Error| e.to_string())
}

fn parse_scenario(s: &str) -> Result<Scenario, String> {
    s.parse().map_err(|e: ofmfa::Error| e.to_string())
}

fn parse_mean_branch(s: &str) -> Result<MeanBranch, String> {
    s.parse().map_err(|e: ofmfa::Error| e.to_string())
}

impl FitArgs {
    pub fn request(&self) -> CliResult<FitRequest> {
        if let Some(path) = &self.manifest {
            return Ok(Manifest::load(path)?.request);
        }
        let input = self.input.clone().ok_or_else(|| CliError::usage("config", "--input is required"))?;
        Ok(FitRequest {
            input,
            header: self.header,
            truth: self.truth.clone(),
            truth_column: self.truth_column.clone(),
            config: FitConfig {
                k: self.k,
                q_grid: self.q_grid.0.clone(),
                sigma_modes: self.sigma_mode.modes(),
                alpha: self.alpha,
                beta: self.beta,
                g: self.g,
                h: self.h,
                gamma: self.gamma,
                chains: self.chains,
                delta: self.delta,
                seed: self.seed,
                allow_above_ledermann: self.allow_above_ledermann,
                run: RunConfig {
                    iterations: self.iterations,
                    burnin: self.burnin.unwrap_or(5_000.min(self.iterations / 4)),
                    thin: self.thin,
                    swap_every: self.swap_every,
                    warm_iterations: self.warm,
                },
                criterion: self.criterion,
                replicates: self.replicates,
                trace_format: self.trace_format,
            },
        })
    }
}

fn report_fit(outcome: &FitOutcome) {
    println!("{:>3}  {:<13} {:>5} {:>14} {:>14} {:>14} {:>14}", "q", "sigma", "k_hat", "aic", "bic", "dic", "dic2");
    for (i, pt) in outcome.selection.points.iter().enumerate() {
        let mark = if i == outcome.selection.best { "*" } else { "" };
        match pt.score() {
            Some(s) => println!(
                "{:>3}  {:<13} {:>5} {:>14.3} {:>14.3} {:>14.3} {:>14.3} {mark}",
                s.q, s.sigma_mode.as_str(), s.k_hat, s.aic, s.bic, s.dic, s.dic2
            ),
            None => println!("{:>3}  {:<13} failed: {}", pt.hp.q, pt.hp.sigma_mode.as_str(), pt.outcome.as_ref().unwrap_err()),
        }
    }
    let s = &outcome.summary;
    println!(
        "selected by {}: q = {}, {} errors, {} clusters",
        s.selected.criterion.as_str(),
        s.selected.q,
        s.selected.sigma_mode,
        s.posterior.k_hat
    );
    if let Some(a) = &outcome.agreement {
        println!("agreement with truth: ARI {:.4}, RI {:.4}", a.adjusted_rand_index, a.rand_index);
    }
    if let Some(d) = &outcome.diagnostics {
        match (&d.psrf, &d.error) {
            (Some(r), _) => {
                let worst = r.values.iter().cloned().fold(f64::NAN, f64::max);
                println!("max PSRF over {} replicates: {worst:.4} (converged: {})", d.replicates, r.converged);
            }
            (None, Some(e)) => println!("PSRF unavailable: {e}"),
            (None, None) => {}
        }
    }
}

fn execute(cli: Cli) -> CliResult<()> {
    match cli.command {
        Command::Fit(args) => {
            let request = args.request()?;
            let workers = args.workers.unwrap_or_else(rayon::current_num_threads);
            let outcome = fit::fit(&request, &args.out, workers)?;
            report_fit(&outcome);
            println!("wrote {}", args.out.display());
        }
        Command::Simulate(args) => {
            let spec = SynthSpec {
                k: args.k,
                q: args.q,
                n: args.n,
                p: args.p,
                scenario: args.scenario,
                seed: args.seed,
                mean_branch: args.mean_branch,
            };
            simulate::simulate(&spec, &args.out)?;
            println!("wrote {}", args.out.display());
        }
        Command::Score(args) => {
            let (ri, ari) = score::score(
                &args.predicted,
                args.predicted_column.as_deref(),
                &args.truth,
                args.truth_column.as_deref(),
            )?;
            println!("ARI {ari:?}, RI {ri:?}");
        }
    }
    Ok(())
}

/// Runs the tool on `argv` (including the program name) and returns the
/// process exit code.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 1 } else { 0 };
        }
    };
    match execute(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
