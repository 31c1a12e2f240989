//! The pipeline stages behind each subcommand.

use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use sigfbsde::bsde::{dataset_loss, initial_parameters, simulate_data, train_on, Dataset, Parameters, TrainReport};
use sigfbsde::nn::checkpoint::{read_checkpoint, write_checkpoint};

use crate::cache::{self, CacheEntry, CacheStatus, Split};
use crate::config::ExperimentConfig;
use crate::output::{self, EvalRow, LossRow, ReportRow, SummaryRow};
use crate::CliError;

/// Writes the cached simulation for `cfg` unless a valid entry already exists.
pub fn simulate(cfg: &ExperimentConfig) -> Result<(CacheEntry, CacheStatus), CliError> {
    cfg.validate()?;
    let problem = cfg.build_problem()?;
    let entry = CacheEntry::for_config(cfg, &problem)?;
    let status = cache::ensure(&entry, &problem, cfg.train.chunk)?;
    Ok((entry, status))
}

pub struct TrainOutcome {
    pub report: TrainReport,
    pub out_dir: PathBuf,
    pub from_cache: bool,
}

/// Trains and writes the config snapshot, loss curve, summary and checkpoint.
///
/// Data come from the cache when a valid entry exists and are simulated in
/// memory otherwise; both routes produce identical datasets.
pub fn train(cfg: &ExperimentConfig) -> Result<TrainOutcome, CliError> {
    cfg.validate()?;
    let problem = cfg.build_problem()?;
    let tc = cfg.train_config();
    let entry = CacheEntry::for_config(cfg, &problem)?;
    let from_cache = cache::exists_and_valid(&entry);
    let data = if from_cache {
        log::info!("loading paths from {}", entry.dir.display());
        entry.load_data(&problem, &tc.feature_spec(&problem)?, tc.chunk)?
    } else {
        simulate_data(&problem, &tc)?
    };
    let params = initial_parameters(&problem, &tc, &data.train);
    std::fs::create_dir_all(&cfg.out_dir)?;
    std::fs::write(cfg.out_dir.join(output::CONFIG_FILE), cfg.to_toml()?)?;
    let report = match train_on(&problem, &tc, &data, params) {
        Ok(r) => r,
        Err(e) => {
            let e = CliError::from(e);
            log::error!("{e}");
            return Err(e);
        }
    };
    let losses: Vec<LossRow> = (0..report.iterations)
        .map(|i| LossRow { iteration: i, loss: report.losses[i], y0: report.y0_trace[i], wall_ms: report.wall_ms[i] })
        .collect();
    output::write_file(&cfg.out_dir.join(output::LOSS_FILE), &output::LOSS_COLUMNS, &losses)?;
    output::write_file(&cfg.out_dir.join(output::SUMMARY_FILE), &output::SUMMARY_COLUMNS, &[summary_row(cfg, &report)])?;
    let mut w = BufWriter::new(File::create(cfg.out_dir.join(output::CHECKPOINT_FILE))?);
    write_checkpoint(&mut w, &report.params.named_blocks())?;
    w.flush()?;
    Ok(TrainOutcome { report, out_dir: cfg.out_dir.clone(), from_cache })
}

pub fn summary_row(cfg: &ExperimentConfig, r: &TrainReport) -> SummaryRow {
    SummaryRow {
        problem: cfg.problem.clone(),
        method: cfg.method().to_string(),
        n: cfg.segments.n,
        ntilde: cfg.effective_ntilde(),
        seed: cfg.seed,
        iterations: r.iterations,
        converged: r.converged,
        y0_init: r.y0_init,
        y0: r.y0,
        oracle: r.oracle,
        abs_err: r.abs_err(),
        rel_err: r.rel_err(),
        test_loss: r.test_loss,
        wall_ms: r.mean_wall_ms(),
        total_ms: r.wall_ms.iter().sum(),
    }
}

/// Scores a finished run on its held-out paths, using only the run directory.
pub fn evaluate(run_dir: &Path) -> Result<EvalRow, CliError> {
    let cfg = ExperimentConfig::load(&run_dir.join(output::CONFIG_FILE))?;
    cfg.validate()?;
    if cfg.train.n_test == 0 {
        return Err(CliError::Validation("run has no held-out paths (n_test = 0)".into()));
    }
    let problem = cfg.build_problem()?;
    let tc = cfg.train_config();
    let spec = tc.feature_spec(&problem)?;
    let mut r = BufReader::new(File::open(run_dir.join(output::CHECKPOINT_FILE))?);
    let params = Parameters::from_named_blocks(read_checkpoint(&mut r)?)?;
    let entry = CacheEntry::for_config(&cfg, &problem)?;
    let test = if cache::exists_and_valid(&entry) {
        entry.load(&problem, &spec, Split::Test, tc.chunk)?
    } else {
        Dataset::simulate(&problem, &spec, tc.seed, tc.n_paths, tc.n_test, tc.chunk, false)?
    };
    if params.net.input_dim != test.width || params.net.output_dim != test.noise_dim {
        return Err(CliError::Validation("checkpoint does not match the run's feature layout".into()));
    }
    let test_loss = dataset_loss(&problem, &test, &params, tc.z_scale, tc.chunk)?;
    let oracle = problem.oracle_value().transpose()?;
    let row = EvalRow {
        problem: cfg.problem.clone(),
        method: cfg.method().to_string(),
        n: cfg.segments.n,
        ntilde: cfg.effective_ntilde(),
        n_test: test.n_paths,
        y0: params.y0(),
        oracle,
        test_loss,
    };
    output::write_file(&run_dir.join(output::EVAL_FILE), &output::EVAL_COLUMNS, &[row.clone()])?;
    Ok(row)
}

/// Every `summary.csv` under `inputs`, each either a run directory or a tree of them.
pub fn collect_summaries(inputs: &[PathBuf]) -> Result<Vec<PathBuf>, CliError> {
    fn walk(dir: &Path, out: &mut Vec<PathBuf>) -> Result<(), CliError> {
        let own = dir.join(output::SUMMARY_FILE);
        if own.is_file() {
            out.push(own);
        }
        let mut subdirs: Vec<PathBuf> =
            std::fs::read_dir(dir)?.filter_map(|e| e.ok().map(|e| e.path())).filter(|p| p.is_dir()).collect();
        subdirs.sort();
        for d in subdirs {
            walk(&d, out)?;
        }
        Ok(())
    }
    let mut out = Vec::new();
    for p in inputs {
        if p.is_file() {
            out.push(p.clone());
        } else if p.is_dir() {
            walk(p, &mut out)?;
        } else {
            return Err(CliError::Validation(format!("{} does not exist", p.display())));
        }
    }
    Ok(out)
}

/// Comparison table over runs, sorted by (problem, method, n, ntilde).
pub fn report(inputs: &[PathBuf]) -> Result<Vec<ReportRow>, CliError> {
    let mut rows = Vec::new();
    for path in collect_summaries(inputs)? {
        for s in output::read_file::<SummaryRow>(&path)? {
            rows.push(ReportRow::from(&s));
        }
    }
    rows.sort_by(|a, b| (&a.problem, &a.method, a.n, a.ntilde).cmp(&(&b.problem, &b.method, b.n, b.ntilde)));
    Ok(rows)
}

pub fn write_report(rows: &[ReportRow], out: Option<&Path>) -> Result<(), CliError> {
    match out {
        Some(p) => {
            if let Some(dir) = p.parent().filter(|d| !d.as_os_str().is_empty()) {
                std::fs::create_dir_all(dir)?;
            }
            output::write_file(p, &output::REPORT_COLUMNS, rows)
        }
        None => output::write_rows(std::io::stdout().lock(), &output::REPORT_COLUMNS, rows),
    }
}
