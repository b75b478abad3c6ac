//! The four experiment commands behind the CLI. Each one is a pure function
//! of (config, input files, seeds): rerunning with the same inputs produces
//! byte-identical outputs. Every command writes the fully-resolved config
//! into its output directory.

use std::io::Write as _;
use std::path::{Path, PathBuf};

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::analysis::{
    pvalue_matrix, sensitivity_scan, write_distributions_csv, write_histograms_csv,
    write_pvalues_csv,
};
use crate::config::ExperimentConfig;
use crate::dataset::{
    build_dataset, read_manifest, read_records, split, write_manifest, write_records,
    DatasetManifest, DatasetRecord, GenerationSummary, SplitCounts, DATASET_FORMAT_VERSION,
};
use crate::dynamics::{evolve, fidelity_error};
use crate::error::{Error, Result};
use crate::lstm::{
    evaluate, read_checkpoint, train, write_checkpoint, Checkpoint, Evaluation, TrainExample,
    CHECKPOINT_FORMAT_VERSION, OUTLIER_THRESHOLD,
};

pub const MANIFEST_FILE: &str = "manifest.json";
pub const TRAIN_FILE: &str = "train.jsonl";
pub const TEST_FILE: &str = "test.jsonl";
pub const CONFIG_ECHO_FILE: &str = "config.toml";
pub const CHECKPOINT_FILE: &str = "checkpoint.json";
pub const HISTORY_FILE: &str = "history.csv";
pub const METRICS_FILE: &str = "metrics.csv";
pub const DISTRIBUTIONS_FILE: &str = "distributions.csv";
pub const PVALUES_FILE: &str = "pvalues.csv";
pub const HISTOGRAMS_FILE: &str = "histograms.csv";

fn ensure_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    Ok(())
}

fn echo_config(dir: &Path, cfg: &ExperimentConfig) -> Result<()> {
    std::fs::write(dir.join(CONFIG_ECHO_FILE), cfg.to_toml())?;
    Ok(())
}

fn sha256_hex(path: &Path) -> Result<String> {
    let bytes = std::fs::read(path)?;
    let mut hasher = Sha256::new();
    hasher.update(&bytes);
    Ok(format!("{:x}", hasher.finalize()))
}

fn load_examples(records: &[DatasetRecord]) -> Result<Vec<TrainExample>> {
    records.iter().map(TrainExample::from_record).collect()
}

/// Guard: a dataset directory and a system config must describe the same
/// drifted system before they can be combined.
fn check_system_tag(manifest: &DatasetManifest, expected_tag: &str) -> Result<()> {
    let found = manifest.system.tag();
    if found != expected_tag {
        return Err(Error::Incompatible(format!(
            "dataset was generated for system '{found}' but this run expects '{expected_tag}'"
        )));
    }
    Ok(())
}

#[derive(Debug, Clone, Serialize)]
pub struct GenDataOutcome {
    pub out_dir: PathBuf,
    pub train_count: usize,
    pub test_count: usize,
    pub summary: GenerationSummary,
}

/// Generate the corpus: admitted records split into train/test files plus a
/// manifest describing the system and seed.
pub fn cmd_gen_data(cfg: &ExperimentConfig, out_dir: &Path) -> Result<GenDataOutcome> {
    cfg.validate()?;
    ensure_dir(out_dir)?;
    echo_config(out_dir, cfg)?;

    let total = cfg.dataset.train_count + cfg.dataset.test_count;
    let (records, summary) = build_dataset(
        total,
        &cfg.system,
        cfg.data_seed(),
        cfg.dataset.with_dcp,
        &cfg.optim_config(),
    )?;
    let train_fraction = cfg.dataset.train_count as f64 / total as f64;
    let (train_set, test_set) = split(records, train_fraction, cfg.split_seed())?;

    let manifest = DatasetManifest {
        format_version: DATASET_FORMAT_VERSION,
        system: cfg.system.clone(),
        counts: SplitCounts {
            train: train_set.len(),
            test: test_set.len(),
        },
        global_seed: cfg.data_seed(),
    };
    write_manifest(&out_dir.join(MANIFEST_FILE), &manifest)?;
    write_records(&out_dir.join(TRAIN_FILE), &train_set)?;
    write_records(&out_dir.join(TEST_FILE), &test_set)?;

    Ok(GenDataOutcome {
        out_dir: out_dir.to_path_buf(),
        train_count: train_set.len(),
        test_count: test_set.len(),
        summary,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct TrainOutcome {
    pub out_dir: PathBuf,
    pub epochs: usize,
    pub final_train_err: f64,
    pub final_test_fidelity: f64,
    pub best_train_err: f64,
}

/// Train on a dataset directory; writes the checkpoint and per-epoch history.
pub fn cmd_train(cfg: &ExperimentConfig, data_dir: &Path, out_dir: &Path) -> Result<TrainOutcome> {
    cfg.validate()?;
    let manifest = read_manifest(&data_dir.join(MANIFEST_FILE))?;
    check_system_tag(&manifest, &cfg.system.tag())?;

    let train_records = read_records(&data_dir.join(TRAIN_FILE))?;
    let test_records = read_records(&data_dir.join(TEST_FILE))?;
    let train_examples = load_examples(&train_records)?;
    let test_examples = load_examples(&test_records)?;

    ensure_dir(out_dir)?;
    echo_config(out_dir, cfg)?;

    let train_config = cfg.train_config();
    let (params, history) = train(&train_examples, &test_examples, &train_config, cfg.init_seed())?;

    let checkpoint = Checkpoint {
        format_version: CHECKPOINT_FORMAT_VERSION,
        params,
        train_config,
        manifest_sha256: sha256_hex(&data_dir.join(MANIFEST_FILE))?,
    };
    write_checkpoint(&out_dir.join(CHECKPOINT_FILE), &checkpoint)?;

    // Deterministic history CSV; wall times go to stderr only.
    let mut file = std::io::BufWriter::new(std::fs::File::create(out_dir.join(HISTORY_FILE))?);
    writeln!(file, "epoch,train_err,test_fidelity")?;
    for e in 0..history.train_err.len() {
        writeln!(file, "{e},{},{}", history.train_err[e], history.test_fidelity[e])?;
    }
    file.flush()?;
    let total_seconds: f64 = history.epoch_seconds.iter().sum();
    eprintln!("trained {} epochs in {total_seconds:.1}s", history.train_err.len());

    let best = history
        .train_err
        .iter()
        .cloned()
        .fold(f64::INFINITY, f64::min);
    Ok(TrainOutcome {
        out_dir: out_dir.to_path_buf(),
        epochs: history.train_err.len(),
        final_train_err: *history.train_err.last().expect("epochs >= 1"),
        final_test_fidelity: *history.test_fidelity.last().expect("epochs >= 1"),
        best_train_err: best,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct EvalOutcome {
    pub out_dir: PathBuf,
    pub records: usize,
    pub mean_fidelity: f64,
    pub outliers: usize,
    /// True when stored DCPs were replayed instead of the model.
    pub oracle_dcp: bool,
}

/// Evaluate a checkpoint on a dataset's test split. With `oracle_dcp`, the
/// stored DCPs are replayed instead of the network (a debugging baseline).
pub fn cmd_eval(
    checkpoint_path: &Path,
    data_dir: &Path,
    out_dir: &Path,
    oracle_dcp: bool,
    cfg: &ExperimentConfig,
) -> Result<EvalOutcome> {
    let checkpoint = read_checkpoint(checkpoint_path)?;
    let manifest = read_manifest(&data_dir.join(MANIFEST_FILE))?;
    check_system_tag(&manifest, &checkpoint.train_config.system.tag())?;

    let test_records = read_records(&data_dir.join(TEST_FILE))?;
    if test_records.is_empty() {
        return Err(Error::InvalidArgument("test set is empty".into()));
    }
    let sys = checkpoint.train_config.system.drifted()?;

    let evaluation: Evaluation = if oracle_dcp {
        let fidelities: Vec<f64> = test_records
            .iter()
            .map(|rec| {
                let dcp = rec
                    .dcp_pulses()
                    .ok_or_else(|| {
                        Error::Incompatible(format!(
                            "record {} has no stored DCP; regenerate the dataset with DCPs \
                             to use the replay oracle",
                            rec.id
                        ))
                    })??;
                let x = evolve(&sys, &dcp);
                Ok(1.0 - fidelity_error(&rec.target()?, &x)?)
            })
            .collect::<Result<Vec<f64>>>()?;
        let mean = fidelities.iter().sum::<f64>() / fidelities.len() as f64;
        let outliers = fidelities.iter().filter(|&&f| f < OUTLIER_THRESHOLD).count();
        Evaluation {
            mean_fidelity: mean,
            fidelities,
            outliers,
        }
    } else {
        let examples = load_examples(&test_records)?;
        evaluate(&checkpoint.params, &examples, &sys)
    };

    ensure_dir(out_dir)?;
    echo_config(out_dir, cfg)?;
    let mut file = std::io::BufWriter::new(std::fs::File::create(out_dir.join(METRICS_FILE))?);
    writeln!(file, "record,fidelity")?;
    for (rec, fid) in test_records.iter().zip(evaluation.fidelities.iter()) {
        writeln!(file, "{},{}", rec.id, fid)?;
    }
    writeln!(file, "mean,{}", evaluation.mean_fidelity)?;
    writeln!(file, "outliers,{}", evaluation.outliers)?;
    file.flush()?;

    Ok(EvalOutcome {
        out_dir: out_dir.to_path_buf(),
        records: test_records.len(),
        mean_fidelity: evaluation.mean_fidelity,
        outliers: evaluation.outliers,
        oracle_dcp,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct ScanOutcome {
    pub out_dir: PathBuf,
    pub eps: f64,
    pub admitted_records: usize,
    pub skipped_records: usize,
    pub skipped_samples: usize,
    /// NaN entries in the p-value matrix (empty distributions).
    pub missing_entries: usize,
}

/// Perturbation-sensitivity scan of a trained model over a dataset's test
/// split; emits the deviation distributions, the p-value matrix, and
/// per-coordinate histograms as CSV.
pub fn cmd_scan(
    checkpoint_path: &Path,
    data_dir: &Path,
    out_dir: &Path,
    cfg: &ExperimentConfig,
) -> Result<ScanOutcome> {
    let checkpoint = read_checkpoint(checkpoint_path)?;
    let manifest = read_manifest(&data_dir.join(MANIFEST_FILE))?;
    check_system_tag(&manifest, &checkpoint.train_config.system.tag())?;

    let test_records = read_records(&data_dir.join(TEST_FILE))?;
    if test_records.is_empty() {
        return Err(Error::InvalidArgument("test set is empty".into()));
    }
    let sys = checkpoint.train_config.system.drifted()?;
    let testset: Vec<(u64, TrainExample)> = test_records
        .iter()
        .map(|rec| Ok((rec.id, TrainExample::from_record(rec)?)))
        .collect::<Result<Vec<_>>>()?;

    let eps = cfg.analysis.eps;
    let distributions = sensitivity_scan(&checkpoint.params, &testset, &sys, eps)?;
    let matrix = pvalue_matrix(&distributions, sys.slots())?;

    ensure_dir(out_dir)?;
    echo_config(out_dir, cfg)?;
    write_distributions_csv(&out_dir.join(DISTRIBUTIONS_FILE), &distributions)?;
    write_pvalues_csv(&out_dir.join(PVALUES_FILE), &matrix)?;
    write_histograms_csv(&out_dir.join(HISTOGRAMS_FILE), &distributions, cfg.analysis.bins)?;

    Ok(ScanOutcome {
        out_dir: out_dir.to_path_buf(),
        eps,
        admitted_records: testset.len() - distributions.skipped_records,
        skipped_records: distributions.skipped_records,
        skipped_samples: distributions.skipped_samples,
        missing_entries: matrix.missing,
    })
}
