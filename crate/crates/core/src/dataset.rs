//! Generation, serialization, and splitting of (NCP, target) corpora.
//!
//! Storage is one JSON manifest plus one record-per-line JSON file. Complex
//! matrices are stored as flat row-major arrays of (real, imaginary) pairs;
//! pulse matrices as one `[h_x, h_z]` row per time slot. Floats keep full
//! round-trip precision.

use std::io::{BufRead, Write};
use std::path::Path;

use ndarray::Array2;
use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dynamics::{target_superoperator, ControlPulses};
use crate::error::{Error, Result};
use crate::grape::{generate_dcp, generate_ncp, OptimConfig, DCP_FIDELITY_THRESHOLD};
use crate::linalg::{CMatrix, C64};
use crate::presets::SystemConfig;
use crate::quantum::Superoperator;
use crate::rng::RngSeed;

pub const DATASET_FORMAT_VERSION: u32 = 1;

/// One admitted (target, NCP, optional DCP) sample.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetRecord {
    pub id: u64,
    pub seed: RngSeed,
    /// 2x2 single-qubit target, row-major (re, im) pairs; the full target is
    /// `u kron 1`.
    pub u_target: Vec<(f64, f64)>,
    /// One `[h_x, h_z]` row per slot.
    pub ncp: Vec<[f64; 2]>,
    pub ncp_fidelity: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dcp: Option<Vec<[f64; 2]>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dcp_fidelity: Option<f64>,
    /// Tag of the drifted system the DCP was optimized against.
    pub drift_tag: String,
}

fn pulses_to_rows(p: &ControlPulses) -> Vec<[f64; 2]> {
    (0..p.slots())
        .map(|i| [p.values()[[i, 0]], p.values()[[i, 1]]])
        .collect()
}

fn rows_to_pulses(rows: &[[f64; 2]]) -> Result<ControlPulses> {
    let mut values = Array2::zeros((rows.len(), 2));
    for (i, row) in rows.iter().enumerate() {
        values[[i, 0]] = row[0];
        values[[i, 1]] = row[1];
    }
    ControlPulses::new(values)
}

impl DatasetRecord {
    pub fn validate(&self) -> Result<()> {
        if self.u_target.len() != 4 {
            return Err(Error::Parse(format!(
                "record {}: u_target must have 4 entries, got {}",
                self.id,
                self.u_target.len()
            )));
        }
        if self.dcp.is_some() != self.dcp_fidelity.is_some() {
            return Err(Error::Parse(format!(
                "record {}: dcp and dcp_fidelity must be stored together",
                self.id
            )));
        }
        Ok(())
    }

    pub fn u_target_matrix(&self) -> CMatrix {
        Array2::from_shape_vec(
            (2, 2),
            self.u_target.iter().map(|&(re, im)| C64::new(re, im)).collect(),
        )
        .expect("validated length")
    }

    /// Target superoperator `(u kron 1) kron conj(u kron 1)`.
    pub fn target(&self) -> Result<Superoperator> {
        target_superoperator(&self.u_target_matrix())
    }

    pub fn ncp_pulses(&self) -> Result<ControlPulses> {
        rows_to_pulses(&self.ncp)
    }

    pub fn dcp_pulses(&self) -> Option<Result<ControlPulses>> {
        self.dcp.as_ref().map(|rows| rows_to_pulses(rows))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SplitCounts {
    pub train: usize,
    pub test: usize,
}

/// Describes a dataset directory: the system every record was generated
/// against, the train/test sizes, and the seed the corpus grew from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetManifest {
    pub format_version: u32,
    pub system: SystemConfig,
    pub counts: SplitCounts,
    pub global_seed: RngSeed,
}

/// Outcome counters of a generation run, reported to the caller.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GenerationSummary {
    pub admitted: usize,
    /// Candidate streams that failed to converge and were replaced.
    pub skipped_streams: Vec<u64>,
    pub ncp_fidelity_min: f64,
    pub ncp_fidelity_median: f64,
    pub ncp_fidelity_max: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dcp_fidelity_min: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dcp_fidelity_median: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dcp_fidelity_max: Option<f64>,
}

fn quantiles(values: &mut Vec<f64>) -> (f64, f64, f64) {
    values.sort_by(|a, b| a.partial_cmp(b).expect("finite fidelities"));
    (values[0], values[values.len() / 2], values[values.len() - 1])
}

/// Generate `count` admitted records with per-record seeds derived from the
/// global seed as `(seed, stream = global.stream + candidate_index)`.
/// Candidates whose optimization fails are skipped and replaced by the next
/// stream, keeping generation total and deterministic.
pub fn build_dataset(
    count: usize,
    sys_cfg: &SystemConfig,
    global_seed: RngSeed,
    with_dcp: bool,
    optim: &OptimConfig,
) -> Result<(Vec<DatasetRecord>, GenerationSummary)> {
    if count == 0 {
        return Err(Error::InvalidArgument("dataset count must be >= 1".into()));
    }
    let sys_free = sys_cfg.drift_free()?;
    let sys_drift = sys_cfg.drifted()?;
    let tag = sys_cfg.tag();

    let mut admitted: Vec<DatasetRecord> = Vec::with_capacity(count);
    let mut skipped: Vec<u64> = Vec::new();
    let mut next_candidate = 0u64;
    let candidate_cap = 20 * count as u64 + 100;

    while admitted.len() < count {
        if next_candidate >= candidate_cap {
            return Err(Error::GenerationFailed {
                seed: global_seed.seed,
                stream: global_seed.stream,
                attempts: next_candidate as usize,
            });
        }
        let need = count - admitted.len();
        let batch: Vec<u64> = (next_candidate..next_candidate + need as u64).collect();
        next_candidate += need as u64;

        let results: Vec<(u64, Result<DatasetRecord>)> = batch
            .into_par_iter()
            .map(|k| {
                let seed = global_seed.with_stream(global_seed.stream + k);
                let rec = generate_record(&sys_free, &sys_drift, &tag, seed, with_dcp, optim);
                (k, rec)
            })
            .collect();

        for (k, res) in results {
            match res {
                Ok(rec) if admitted.len() < count => admitted.push(rec),
                Ok(_) => {}
                Err(_) => skipped.push(k),
            }
        }
    }

    for (id, rec) in admitted.iter_mut().enumerate() {
        rec.id = id as u64;
    }

    let mut ncp_fids: Vec<f64> = admitted.iter().map(|r| r.ncp_fidelity).collect();
    let (nmin, nmed, nmax) = quantiles(&mut ncp_fids);
    let (dmin, dmed, dmax) = if with_dcp {
        let mut d: Vec<f64> = admitted.iter().filter_map(|r| r.dcp_fidelity).collect();
        let (a, b, c) = quantiles(&mut d);
        (Some(a), Some(b), Some(c))
    } else {
        (None, None, None)
    };

    let summary = GenerationSummary {
        admitted: admitted.len(),
        skipped_streams: skipped,
        ncp_fidelity_min: nmin,
        ncp_fidelity_median: nmed,
        ncp_fidelity_max: nmax,
        dcp_fidelity_min: dmin,
        dcp_fidelity_median: dmed,
        dcp_fidelity_max: dmax,
    };
    Ok((admitted, summary))
}

fn generate_record(
    sys_free: &crate::dynamics::SystemSpec,
    sys_drift: &crate::dynamics::SystemSpec,
    tag: &str,
    seed: RngSeed,
    with_dcp: bool,
    optim: &OptimConfig,
) -> Result<DatasetRecord> {
    let ncp = generate_ncp(sys_free, seed, optim)?;
    let (dcp, dcp_fidelity) = if with_dcp {
        let y = target_superoperator(&ncp.u_target)?;
        let dcp_cfg = OptimConfig {
            target_fidelity: DCP_FIDELITY_THRESHOLD,
            ..*optim
        };
        let result = generate_dcp(sys_drift, &ncp.pulses, &y, &dcp_cfg)?;
        if !result.converged {
            return Err(Error::GenerationFailed {
                seed: seed.seed,
                stream: seed.stream,
                attempts: 1,
            });
        }
        (Some(pulses_to_rows(&result.pulses)), Some(result.fidelity))
    } else {
        (None, None)
    };

    Ok(DatasetRecord {
        id: 0, // assigned after admission
        seed,
        u_target: ncp.u_target.iter().map(|z| (z.re, z.im)).collect(),
        ncp: pulses_to_rows(&ncp.pulses),
        ncp_fidelity: ncp.fidelity,
        dcp,
        dcp_fidelity,
        drift_tag: tag.to_string(),
    })
}

/// Disjoint, exhaustive, seeded split into train and test sets.
pub fn split(
    mut records: Vec<DatasetRecord>,
    train_fraction: f64,
    seed: RngSeed,
) -> Result<(Vec<DatasetRecord>, Vec<DatasetRecord>)> {
    if !(train_fraction > 0.0 && train_fraction < 1.0) {
        return Err(Error::InvalidArgument(format!(
            "train_fraction must be in (0, 1), got {train_fraction}"
        )));
    }
    let n = records.len();
    let train_len = (train_fraction * n as f64).round() as usize;
    if train_len == 0 || train_len == n {
        return Err(Error::InvalidArgument(format!(
            "split of {n} records at fraction {train_fraction} leaves one side empty"
        )));
    }
    let mut rng = seed.rng();
    records.shuffle(&mut rng);
    let test = records.split_off(train_len);
    Ok((records, test))
}

/// Write records as JSON lines.
pub fn write_records(path: &Path, records: &[DatasetRecord]) -> Result<()> {
    let mut file = std::io::BufWriter::new(std::fs::File::create(path)?);
    for rec in records {
        serde_json::to_writer(&mut file, rec)?;
        file.write_all(b"\n")?;
    }
    file.flush()?;
    Ok(())
}

/// Read and validate a JSON-lines record file.
pub fn read_records(path: &Path) -> Result<Vec<DatasetRecord>> {
    let file = std::io::BufReader::new(std::fs::File::open(path)?);
    let mut records = Vec::new();
    for line in file.lines() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let rec: DatasetRecord = serde_json::from_str(&line)?;
        rec.validate()?;
        records.push(rec);
    }
    Ok(records)
}

pub fn write_manifest(path: &Path, manifest: &DatasetManifest) -> Result<()> {
    let mut file = std::io::BufWriter::new(std::fs::File::create(path)?);
    serde_json::to_writer_pretty(&mut file, manifest)?;
    file.write_all(b"\n")?;
    file.flush()?;
    Ok(())
}

pub fn read_manifest(path: &Path) -> Result<DatasetManifest> {
    let file = std::io::BufReader::new(std::fs::File::open(path)?);
    let manifest: DatasetManifest = serde_json::from_reader(file)?;
    if manifest.format_version != DATASET_FORMAT_VERSION {
        return Err(Error::Incompatible(format!(
            "dataset format version {} (this build reads {})",
            manifest.format_version, DATASET_FORMAT_VERSION
        )));
    }
    Ok(manifest)
}
