use std::path::{Path, PathBuf};

use rayon::prelude::*;

use super::config::{ExperimentConfig, KernelRun, TargetSpec};
use super::output::{
    emit_chain_csv, write_adaptation_csv, write_report, write_summary_csv, SummaryRow,
};
use super::plot::{acf_svg, sigma_svg, trace_svg};
use crate::adaptive::run_adaptive_chain;
use crate::diagnostics::DiagnosticsReport;
use crate::error::{Error, Result};
use crate::kernels::run_chain;
use crate::targets::{simulate_glm, TargetDensity};

/// Environment variable bounding the number of concurrent runs.
pub const THREADS_ENV: &str = "DIRMH_THREADS";

const ACF_MAX_LAG: usize = 100;

#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub label: String,
    pub seed: u64,
    pub dir: PathBuf,
    pub report: Option<DiagnosticsReport>,
    pub error: Option<String>,
}

#[derive(Debug, Clone)]
pub struct ExperimentOutcome {
    pub runs: Vec<RunOutcome>,
    pub summary_path: PathBuf,
}

impl ExperimentOutcome {
    pub fn failures(&self) -> impl Iterator<Item = &RunOutcome> {
        self.runs.iter().filter(|r| r.error.is_some())
    }
}

/// Directory holding the artifacts of one (kernel, seed) run.
pub fn run_dir(output_dir: &Path, label: &str, seed: u64) -> PathBuf {
    output_dir.join(label).join(format!("seed-{seed}"))
}

fn thread_count() -> usize {
    std::env::var(THREADS_ENV)
        .ok()
        .and_then(|v| v.trim().parse::<usize>().ok())
        .filter(|n| *n > 0)
        .unwrap_or_else(|| {
            std::thread::available_parallelism()
                .map(|n| n.get())
                .unwrap_or(1)
        })
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn write_simulated_data(spec: &TargetSpec, dir: &Path) -> Result<()> {
    let TargetSpec::GlmSimulated {
        family,
        n,
        p,
        data_seed,
        v_beta,
        v_u,
    } = spec
    else {
        return Ok(());
    };
    let sim = simulate_glm(*data_seed, *family, *n, *p, *v_beta, *v_u)?;
    let mut text = String::from("y");
    for j in 1..=*p {
        text.push_str(&format!(",x{j}"));
    }
    text.push('\n');
    for i in 0..sim.data.n() {
        text.push_str(&sim.data.response()[i].to_string());
        for v in sim.data.row(i) {
            text.push(',');
            text.push_str(&v.to_string());
        }
        text.push('\n');
    }
    write_text(&dir.join("data.csv"), &text)?;
    let truth: Vec<String> = sim
        .beta
        .iter()
        .chain(std::iter::once(&sim.intercept))
        .map(|v| v.to_string())
        .collect();
    write_text(&dir.join("truth.csv"), &format!("{}\n", truth.join(",")))
}

fn run_one(
    config: &ExperimentConfig,
    target: &dyn TargetDensity,
    kernel: &KernelRun,
    seed: u64,
) -> Result<DiagnosticsReport> {
    let dir = run_dir(&config.output_dir, &kernel.label, seed);
    std::fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
    let x0 = config.start(target.dim());

    let chain = if kernel.adaptive && config.adaptation.enabled {
        let state = config.adaptation.initial_state()?;
        let run = run_adaptive_chain(seed, target, &kernel.config, state, &x0, config.length)?;
        write_adaptation_csv(&run.trace, &dir.join("adaptation.csv"))?;
        write_text(&dir.join("sigma.svg"), &sigma_svg(&run.trace))?;
        run.chain
    } else {
        run_chain(seed, target, &kernel.config, &x0, config.length)?
    };

    emit_chain_csv(&chain.states, &dir.join("chain.csv"))?;
    let report = DiagnosticsReport::compute(&chain.states, chain.acceptance_rate(), config.batch_size)?;
    write_report(&report, &dir.join("report.json"))?;
    write_text(&dir.join("trace.svg"), &trace_svg(&chain.states))?;
    let max_lag = ACF_MAX_LAG.min(chain.len() / 2);
    write_text(&dir.join("acf.svg"), &acf_svg(&chain.states, max_lag))?;
    Ok(report)
}

/// Run every (kernel, seed) pair and write the artifact tree under
/// `config.output_dir`. A failing run is reported in the outcome and keeps
/// an empty row in `summary.csv`; the other runs continue.
pub fn run_experiment(config: &ExperimentConfig) -> Result<ExperimentOutcome> {
    let out = &config.output_dir;
    std::fs::create_dir_all(out).map_err(|e| Error::io(out, e))?;
    let target = config.build_target()?;
    if let Some(x0) = &config.x0 {
        if x0.len() != target.dim() {
            return Err(Error::config("x0", format!("must have length {}", target.dim())));
        }
    }
    write_simulated_data(&config.target, out)?;

    let jobs: Vec<(&KernelRun, u64)> = config
        .kernels
        .iter()
        .flat_map(|k| config.seeds.iter().map(move |s| (k, *s)))
        .collect();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(thread_count())
        .build()
        .map_err(|e| Error::InvalidRunLength(format!("thread pool: {e}")))?;
    let runs: Vec<RunOutcome> = pool.install(|| {
        jobs.par_iter()
            .map(|(kernel, seed)| {
                let result = run_one(config, target.as_ref(), kernel, *seed);
                RunOutcome {
                    label: kernel.label.clone(),
                    seed: *seed,
                    dir: run_dir(out, &kernel.label, *seed),
                    error: result.as_ref().err().map(|e| e.to_string()),
                    report: result.ok(),
                }
            })
            .collect()
    });

    let rows: Vec<SummaryRow> = runs
        .iter()
        .map(|r| SummaryRow {
            label: r.label.clone(),
            seed: r.seed,
            report: r.report.clone(),
        })
        .collect();
    let summary_path = out.join("summary.csv");
    write_summary_csv(&rows, target.dim(), &summary_path)?;
    Ok(ExperimentOutcome { runs, summary_path })
}
