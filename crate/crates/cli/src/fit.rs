//! The `fit` command: model grid, selection, post-processing and outputs.

use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::ValueEnum;
use ofmfa::diagnostics::{rand_indices, PsrfReport};
use ofmfa::model::{ChainState, Dataset, ErrorVariances, HyperParams, McmcTrace, ModelScore, SigmaMode};
use ofmfa::postprocess::{ecr_relabel, posterior, PosteriorSummary, RelabelledTrace};
use ofmfa::rng::derive_seed;
use ofmfa::selection::{grid_seed, select_model, Criterion, Selection};
use ofmfa::tempering::{self, RunConfig};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};
use crate::io::{create_dir, csv_bytes, ingest, read_labels, write_atomic, write_json, HeaderMode};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TraceFormat {
    #[default]
    Csv,
    Binary,
    None,
}

/// Every setting that influences the numbers a fit produces.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitConfig {
    pub k: usize,
    pub q_grid: Vec<usize>,
    pub sigma_modes: Vec<SigmaMode>,
    pub alpha: f64,
    pub beta: f64,
    pub g: f64,
    pub h: f64,
    pub gamma: f64,
    pub chains: usize,
    pub delta: f64,
    pub seed: u64,
    pub allow_above_ledermann: bool,
    pub run: RunConfig,
    pub criterion: Criterion,
    pub replicates: usize,
    pub trace_format: TraceFormat,
}

impl Default for FitConfig {
    fn default() -> Self {
        Self {
            k: 20,
            q_grid: vec![1, 2, 3, 4, 5],
            sigma_modes: vec![SigmaMode::PerComponent, SigmaMode::Shared],
            alpha: 0.5,
            beta: 0.5,
            g: 0.5,
            h: 0.5,
            gamma: 1.0,
            chains: 8,
            delta: 1.0,
            seed: 0,
            allow_above_ledermann: false,
            run: RunConfig::default(),
            criterion: Criterion::Bic,
            replicates: 1,
            trace_format: TraceFormat::Csv,
        }
    }
}

impl FitConfig {
    /// Hyperparameters for standardized data with `p` variables.
    pub fn hyperparams(&self, p: usize, q: usize, sigma_mode: SigmaMode) -> HyperParams {
        HyperParams {
            alpha: self.alpha,
            beta: self.beta,
            g: self.g,
            h: self.h,
            gamma: self.gamma,
            chains: self.chains,
            delta: self.delta,
            seed: self.seed,
            allow_above_ledermann: self.allow_above_ledermann,
            ..HyperParams::standardized_defaults(p, self.k, q, sigma_mode)
        }
    }

    pub fn validate(&self, p: usize) -> CliResult<Vec<String>> {
        if self.q_grid.is_empty() || self.sigma_modes.is_empty() {
            return Err(CliError::usage("config", "the model grid is empty"));
        }
        if self.replicates < 1 {
            return Err(CliError::usage("config", "replicates must be at least 1"));
        }
        self.run.validate().map_err(|e| CliError::from_core("config", e))?;
        let mut warnings = Vec::new();
        for &q in &self.q_grid {
            for &mode in &self.sigma_modes {
                let w = self.hyperparams(p, q, mode).validate(p).map_err(|e| CliError::from_core("config", e))?;
                warnings.extend(w);
            }
        }
        warnings.dedup();
        Ok(warnings)
    }
}

/// A complete, reproducible description of a fit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitRequest {
    pub input: PathBuf,
    pub header: HeaderMode,
    pub truth: Option<PathBuf>,
    pub truth_column: Option<String>,
    pub config: FitConfig,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct Timings {
    pub ingest_seconds: f64,
    pub sampling_seconds: f64,
    pub postprocess_seconds: f64,
    pub replicates_seconds: f64,
    pub total_seconds: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GridSeed {
    pub q: usize,
    pub sigma_mode: SigmaMode,
    pub seed: u64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Manifest {
    pub tool: String,
    pub version: String,
    pub command: String,
    pub request: FitRequest,
    pub workers: usize,
    pub grid_seeds: Vec<GridSeed>,
    pub warnings: Vec<String>,
    pub timings: Timings,
}

impl Manifest {
    pub fn load(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io("manifest", path, e))?;
        serde_json::from_str(&text).map_err(|e| CliError::usage("manifest", format!("{}: {e}", path.display())))
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Standardization {
    pub variable_names: Option<Vec<String>>,
    pub center: Vec<f64>,
    pub scale: Vec<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SelectedModel {
    pub q: usize,
    pub sigma_mode: SigmaMode,
    pub criterion: Criterion,
}

/// Contents of `summary.json`. Cluster labels are 1-based; list positions
/// follow the relabelled component order.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SummaryFile {
    pub n: usize,
    pub p: usize,
    pub selected: SelectedModel,
    pub score: ModelScore,
    pub posterior: PosteriorSummary,
    pub standardization: Standardization,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Agreement {
    pub rand_index: f64,
    pub adjusted_rand_index: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Diagnostics {
    pub q: usize,
    pub sigma_mode: SigmaMode,
    pub k_hat: usize,
    pub replicates: usize,
    pub draws_per_run: usize,
    pub failed_replicates: Vec<String>,
    pub psrf: Option<PsrfReport>,
    pub error: Option<String>,
}

/// What a finished fit reports back to the caller.
#[derive(Debug)]
pub struct FitOutcome {
    pub selection: Selection,
    pub summary: SummaryFile,
    pub agreement: Option<Agreement>,
    pub diagnostics: Option<Diagnostics>,
    pub manifest: Manifest,
}

fn sigma_column_names(mode: SigmaMode, k: usize, p: usize) -> Vec<String> {
    match mode {
        SigmaMode::PerComponent => {
            (1..=k).flat_map(|c| (1..=p).map(move |r| format!("sigma2_{c}_{r}"))).collect()
        }
        SigmaMode::Shared => (1..=p).map(|r| format!("sigma2_{r}")).collect(),
    }
}

/// Column names and rows of the relabelled trace.
fn trace_table(trace: &RelabelledTrace, full: &McmcTrace, mode: SigmaMode) -> (Vec<String>, Vec<Vec<f64>>) {
    let k = trace.k_hat;
    let first = &trace.draws[0];
    let (p, q) = (first.p(), first.q());
    let mut names = vec!["iteration".to_string(), "loglik".to_string()];
    names.extend((1..=k).map(|c| format!("w_{c}")));
    names.extend((1..=k).flat_map(|c| (1..=p).map(move |r| format!("mu_{c}_{r}"))));
    names.extend(sigma_column_names(mode, k, p));
    for c in 1..=k {
        for r in 0..p {
            for j in 0..first.lambda[0].free_len(r) {
                names.push(format!("lambda_{c}_{}_{}", r + 1, j + 1));
            }
        }
    }
    names.extend((1..=q).map(|j| format!("omega2_{j}")));
    let rows = trace
        .draws
        .iter()
        .zip(&trace.source)
        .map(|(d, &t)| draw_row(d, full.iterations[t] as f64, full.loglik[t]))
        .collect();
    (names, rows)
}

fn draw_row(d: &ChainState, iteration: f64, loglik: f64) -> Vec<f64> {
    let mut row = vec![iteration, loglik];
    row.extend(&d.w);
    row.extend(d.mu.iter().flatten());
    match &d.sigma {
        ErrorVariances::PerComponent(v) => row.extend(v.iter().flatten()),
        ErrorVariances::Shared(v) => row.extend(v),
    }
    for lam in &d.lambda {
        for r in 0..lam.p() {
            row.extend(&lam.row(r)[..lam.free_len(r)]);
        }
    }
    row.extend(&d.omega);
    row
}

fn fmt(v: f64) -> String {
    format!("{v}")
}

fn write_outputs(out: &Path, outcome: &FitOutcome, data: &Dataset, relabelled: &RelabelledTrace) -> CliResult<()> {
    create_dir(out)?;
    let sel = &outcome.selection;
    let best = sel.best;

    let header: Vec<String> =
        ["q", "sigma_mode", "k_hat", "aic", "bic", "dic", "dic2", "p_d", "d_free", "swap_rate", "selected", "status"]
            .iter()
            .map(|s| s.to_string())
            .collect();
    let rows = sel.points.iter().enumerate().map(|(i, pt)| {
        let selected = (i == best).to_string();
        match &pt.outcome {
            Ok((s, _)) => vec![
                s.q.to_string(),
                s.sigma_mode.to_string(),
                s.k_hat.to_string(),
                fmt(s.aic),
                fmt(s.bic),
                fmt(s.dic),
                fmt(s.dic2),
                fmt(s.p_d),
                s.d_free.to_string(),
                fmt(s.swap_rate),
                selected,
                if s.warnings.is_empty() { "ok".into() } else { s.warnings.join("; ") },
            ],
            Err(e) => {
                let mut row = vec![pt.hp.q.to_string(), pt.hp.sigma_mode.to_string()];
                row.extend(std::iter::repeat_n(String::new(), 8));
                row.push(selected);
                row.push(format!("error: {e}"));
                row
            }
        }
    });
    write_atomic(&out.join("criteria.csv"), &csv_bytes(&header, rows))?;

    let header: Vec<String> = ["q", "sigma_mode", "k", "probability"].iter().map(|s| s.to_string()).collect();
    let rows = sel.points.iter().filter_map(|pt| pt.score()).flat_map(|s| {
        s.k_posterior
            .iter()
            .map(move |(k, prob)| vec![s.q.to_string(), s.sigma_mode.to_string(), k.to_string(), fmt(*prob)])
    });
    write_atomic(&out.join("k_posterior.csv"), &csv_bytes(&header, rows))?;

    let header: Vec<String> = ["q", "sigma_mode", "iteration", "alive", "loglik"].iter().map(|s| s.to_string()).collect();
    let rows = sel.points.iter().filter_map(|pt| pt.trace().map(|t| (pt, t))).flat_map(|(pt, t)| {
        (0..t.len()).map(move |i| {
            vec![
                pt.hp.q.to_string(),
                pt.hp.sigma_mode.to_string(),
                t.iterations[i].to_string(),
                t.alive_count[i].to_string(),
                fmt(t.loglik[i]),
            ]
        })
    });
    write_atomic(&out.join("alive_trace.csv"), &csv_bytes(&header, rows))?;

    let post = &outcome.summary.posterior;
    let mut header = vec!["observation".to_string(), "z_map".to_string()];
    header.extend((1..=post.k_hat).map(|c| format!("prob_{c}")));
    let rows = (0..data.n()).map(|i| {
        let mut row = vec![(i + 1).to_string(), (post.z_map[i] + 1).to_string()];
        row.extend(post.membership_prob[i].iter().map(|v| fmt(*v)));
        row
    });
    write_atomic(&out.join("assignments.csv"), &csv_bytes(&header, rows))?;

    let q = outcome.summary.selected.q;
    let names = data.variable_names();
    let header: Vec<String> = ["cluster", "variable", "name", "factor", "zeta"].iter().map(|s| s.to_string()).collect();
    let rows = (0..post.k_hat).flat_map(|c| {
        (0..data.p()).flat_map(move |r| {
            (0..q).map(move |j| {
                vec![
                    (c + 1).to_string(),
                    (r + 1).to_string(),
                    names.map_or_else(|| format!("x{}", r + 1), |n| n[r].clone()),
                    (j + 1).to_string(),
                    fmt(post.zeta_mean[c][r * q + j]),
                ]
            })
        })
    });
    write_atomic(&out.join("zeta.csv"), &csv_bytes(&header, rows))?;

    let full = sel.best_point().trace().expect("selected point has a trace");
    match outcome.manifest.request.config.trace_format {
        TraceFormat::None => {}
        TraceFormat::Csv => {
            let (names, rows) = trace_table(relabelled, full, outcome.summary.selected.sigma_mode);
            let rows = rows.into_iter().map(|r| r.into_iter().map(fmt));
            write_atomic(&out.join("trace.csv"), &csv_bytes(&names, rows))?;
        }
        TraceFormat::Binary => {
            let (names, rows) = trace_table(relabelled, full, outcome.summary.selected.sigma_mode);
            let bytes: Vec<u8> = rows.iter().flatten().flat_map(|v| v.to_le_bytes()).collect();
            write_atomic(&out.join("trace.bin"), &bytes)?;
            let layout = serde_json::json!({
                "encoding": "f64 little-endian, row-major",
                "rows": rows.len(),
                "columns": names,
            });
            write_json(&out.join("trace_layout.json"), &layout)?;
        }
    }

    write_json(&out.join("summary.json"), &outcome.summary)?;
    if let Some(a) = &outcome.agreement {
        write_json(&out.join("agreement.json"), a)?;
    }
    if let Some(d) = &outcome.diagnostics {
        write_json(&out.join("diagnostics.json"), d)?;
    }
    write_json(&out.join("manifest.json"), &outcome.manifest)
}

/// Reruns the selected model with independent seeds and computes PSRFs of
/// the weights, means and log-likelihood after relabelling every run
/// against the main run's pivot.
fn replicate_diagnostics(
    data: &Dataset,
    hp: &HyperParams,
    run: &RunConfig,
    main: &RelabelledTrace,
    main_trace: &McmcTrace,
    replicates: usize,
) -> Diagnostics {
    let k = main.k_hat;
    let extra: Vec<Result<(RelabelledTrace, McmcTrace), String>> = (1..replicates)
        .into_par_iter()
        .map(|rep| {
            let hp = HyperParams { seed: derive_seed(hp.seed, &[rep as u64]), ..hp.clone() };
            let trace = tempering::run(data, &hp, run).map_err(|e| format!("replicate {rep}: {e}"))?;
            let relabelled = ecr_relabel(&trace, k, &main.pivot).map_err(|e| format!("replicate {rep}: {e}"))?;
            Ok((relabelled, trace))
        })
        .collect();
    let mut runs: Vec<(&RelabelledTrace, &McmcTrace)> = vec![(main, main_trace)];
    let mut failed = Vec::new();
    for r in &extra {
        match r {
            Ok((rt, t)) => runs.push((rt, t)),
            Err(e) => failed.push(e.clone()),
        }
    }
    let t = runs.iter().map(|(rt, _)| rt.len()).min().unwrap_or(0);
    let mut diag = Diagnostics {
        q: hp.q,
        sigma_mode: hp.sigma_mode,
        k_hat: k,
        replicates,
        draws_per_run: t,
        failed_replicates: failed,
        psrf: None,
        error: None,
    };
    if runs.len() < 2 || t < 2 {
        diag.error = Some("need at least two runs with two or more draws at the selected k".into());
        return diag;
    }
    let p = data.p();
    let mut names = vec!["loglik".to_string()];
    names.extend((1..=k).map(|c| format!("w_{c}")));
    names.extend((1..=k).flat_map(|c| (1..=p).map(move |r| format!("mu_{c}_{r}"))));
    let series = |f: &dyn Fn(&ChainState, f64) -> f64| -> Vec<Vec<f64>> {
        runs.iter()
            .map(|(rt, full)| (0..t).map(|i| f(&rt.draws[i], full.loglik[rt.source[i]])).collect())
            .collect()
    };
    let mut traces = vec![series(&|_, ll| ll)];
    for c in 0..k {
        traces.push(series(&|d, _| d.w[c]));
    }
    for c in 0..k {
        for r in 0..p {
            traces.push(series(&|d, _| d.mu[c][r]));
        }
    }
    match PsrfReport::new(names, &traces) {
        Ok(report) => diag.psrf = Some(report),
        Err(e) => diag.error = Some(e.to_string()),
    }
    diag
}

/// Runs a complete fit and writes every output file into `out`.
pub fn fit(request: &FitRequest, out: &Path, workers: usize) -> CliResult<FitOutcome> {
    let started = Instant::now();
    let mut timings = Timings::default();
    let config = &request.config;

    let t0 = Instant::now();
    let data = ingest(&request.input, request.header)?;
    let truth = match &request.truth {
        Some(path) => {
            let labels = read_labels(path, request.truth_column.as_deref())?;
            if labels.len() != data.n() {
                return Err(CliError::data(
                    "labels",
                    format!("{} labels for {} observations", labels.len(), data.n()),
                ));
            }
            Some(labels)
        }
        None => None,
    };
    timings.ingest_seconds = t0.elapsed().as_secs_f64();

    let warnings = config.validate(data.p())?;
    for w in &warnings {
        eprintln!("warning: {w}");
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .map_err(|e| CliError::usage("config", format!("cannot start worker pool: {e}")))?;
    let hp_base = config.hyperparams(data.p(), config.q_grid[0], config.sigma_modes[0]);

    let t0 = Instant::now();
    let selection = pool
        .install(|| select_model(&data, &config.q_grid, &config.sigma_modes, &hp_base, &config.run, config.criterion))
        .map_err(|e| CliError::from_core("sampling", e))?;
    timings.sampling_seconds = t0.elapsed().as_secs_f64();

    let t0 = Instant::now();
    let best = selection.best_point();
    let score = selection.best_score().clone();
    let trace = best.trace().expect("selected point has a trace");
    let (relabelled, posterior_summary) =
        posterior(trace, score.k_hat, &data, &best.hp).map_err(|e| CliError::from_core("postprocess", e))?;
    let agreement = truth.as_ref().map(|t| {
        let (ri, ari) = rand_indices(&posterior_summary.z_map, t).expect("lengths checked at ingestion");
        Agreement { rand_index: ri, adjusted_rand_index: ari }
    });
    timings.postprocess_seconds = t0.elapsed().as_secs_f64();

    let t0 = Instant::now();
    let diagnostics = (config.replicates > 1).then(|| {
        pool.install(|| replicate_diagnostics(&data, &best.hp, &config.run, &relabelled, trace, config.replicates))
    });
    timings.replicates_seconds = t0.elapsed().as_secs_f64();

    let summary = SummaryFile {
        n: data.n(),
        p: data.p(),
        selected: SelectedModel { q: score.q, sigma_mode: score.sigma_mode, criterion: config.criterion },
        score,
        posterior: posterior_summary,
        standardization: Standardization {
            variable_names: data.variable_names().map(|v| v.to_vec()),
            center: data.center().to_vec(),
            scale: data.scale().to_vec(),
        },
    };
    let grid_seeds = config
        .q_grid
        .iter()
        .flat_map(|&q| config.sigma_modes.iter().map(move |&m| GridSeed { q, sigma_mode: m, seed: grid_seed(config.seed, q, m) }))
        .collect();
    timings.total_seconds = started.elapsed().as_secs_f64();
    let manifest = Manifest {
        tool: "ofmfa".into(),
        version: env!("CARGO_PKG_VERSION").into(),
        command: "fit".into(),
        request: request.clone(),
        workers,
        grid_seeds,
        warnings,
        timings,
    };
    let outcome = FitOutcome { selection, summary, agreement, diagnostics, manifest };
    write_outputs(out, &outcome, &data, &relabelled)?;
    Ok(outcome)
}
