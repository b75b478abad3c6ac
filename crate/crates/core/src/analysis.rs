//! Perturbation-sensitivity analysis of a trained model: local disturbances
//! of the input pulses, deviation distributions of the corrected output,
//! pairwise Kruskal-Wallis tests, and the p-value matrix over all disturbed
//! coordinates.

use std::collections::BTreeMap;
use std::io::Write as _;
use std::path::Path;

use ndarray::Array2;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dynamics::{evolve, fidelity_error, Control, ControlPulses, SystemSpec};
use crate::error::{Error, Result};
use crate::lstm::{model_forward, ModelParams, TrainExample, OUTLIER_THRESHOLD};

/// One deviation measurement: which record was disturbed, where, and the
/// Euclidean norm of the output change.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PerturbationSample {
    pub record_id: u64,
    pub slot: usize,
    pub control: Control,
    pub epsilon: f64,
    pub deviation: f64,
}

/// Deviation samples grouped by disturbed coordinate. Keys are (slot,
/// control-column) pairs; for the default system there are 2 n = 64 of them.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct VariationDistributions {
    pub groups: BTreeMap<(usize, usize), Vec<f64>>,
    /// Records rejected at the unperturbed stage (fidelity below 0.9).
    pub skipped_records: usize,
    /// (record, coordinate) pairs rejected at the perturbed stage.
    pub skipped_samples: usize,
    pub epsilon: f64,
}

impl VariationDistributions {
    pub fn group(&self, slot: usize, control: Control) -> Option<&Vec<f64>> {
        self.groups.get(&(slot, control.index()))
    }
}

/// Disturb one pulse coordinate by `eps`, flipping the sign of the change
/// when adding would leave the unit interval.
pub fn perturb(ncp: &ControlPulses, slot: usize, control: Control, eps: f64) -> Result<ControlPulses> {
    if !(eps > 0.0 && eps < 2.0) {
        return Err(Error::InvalidArgument(format!(
            "perturbation size must be in (0, 2), got {eps}"
        )));
    }
    let mut values = ncp.values().clone();
    let j = control.index();
    let current = values[[slot, j]];
    values[[slot, j]] = if current + eps <= 1.0 {
        current + eps
    } else {
        current - eps
    };
    ControlPulses::new(values)
}

/// Scan every admitted test record and every (slot, control) coordinate:
/// disturb the input by `eps`, rerun the model, and record the l2 norm of
/// the output change. Records whose unperturbed output scores below 0.9
/// fidelity are skipped, as are individual perturbed outputs below 0.9.
pub fn sensitivity_scan(
    model: &ModelParams,
    testset: &[(u64, TrainExample)],
    sys: &SystemSpec,
    eps: f64,
) -> Result<VariationDistributions> {
    let slots = sys.slots();
    let per_record: Vec<(bool, usize, Vec<PerturbationSample>)> = testset
        .par_iter()
        .map(|(record_id, ex)| scan_record(model, *record_id, ex, sys, eps))
        .collect::<Result<Vec<_>>>()?;

    let mut out = VariationDistributions {
        epsilon: eps,
        ..VariationDistributions::default()
    };
    for slot in 0..slots {
        for control in Control::ALL {
            out.groups.insert((slot, control.index()), Vec::new());
        }
    }
    for (admitted, skipped_samples, samples) in per_record {
        if !admitted {
            out.skipped_records += 1;
            continue;
        }
        out.skipped_samples += skipped_samples;
        for s in samples {
            out.groups
                .get_mut(&(s.slot, s.control.index()))
                .expect("preallocated group")
                .push(s.deviation);
        }
    }
    Ok(out)
}

fn scan_record(
    model: &ModelParams,
    record_id: u64,
    ex: &TrainExample,
    sys: &SystemSpec,
    eps: f64,
) -> Result<(bool, usize, Vec<PerturbationSample>)> {
    let base = model_forward(&ex.ncp, model);
    let base_fid = 1.0 - fidelity_error(&ex.target, &evolve(sys, &base))?;
    if base_fid < OUTLIER_THRESHOLD {
        return Ok((false, 0, Vec::new()));
    }

    let mut samples = Vec::with_capacity(2 * sys.slots());
    let mut skipped = 0;
    for slot in 0..sys.slots() {
        for control in Control::ALL {
            // eps = 0 would be rejected by perturb's precondition but is
            // useful as a pipeline identity check: deviations are all zero.
            let disturbed_input = if eps == 0.0 {
                ex.ncp.clone()
            } else {
                perturb(&ex.ncp, slot, control, eps)?
            };
            let disturbed = model_forward(&disturbed_input, model);
            let fid = 1.0 - fidelity_error(&ex.target, &evolve(sys, &disturbed))?;
            if fid < OUTLIER_THRESHOLD {
                skipped += 1;
                continue;
            }
            samples.push(PerturbationSample {
                record_id,
                slot,
                control,
                epsilon: eps,
                deviation: base.l2_distance(&disturbed),
            });
        }
    }
    Ok((true, skipped, samples))
}

/// Kruskal-Wallis test outcome for one pair of groups.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KwResult {
    pub h_statistic: f64,
    pub p_value: f64,
    pub group_sizes: [usize; 2],
}

/// Midranks of the pooled sample: ties get the average of the ranks they
/// span.
fn average_ranks(pooled: &[f64]) -> Vec<f64> {
    let n = pooled.len();
    let mut idx: Vec<usize> = (0..n).collect();
    idx.sort_by(|&a, &b| pooled[a].partial_cmp(&pooled[b]).expect("finite deviations"));
    let mut ranks = vec![0.0; n];
    let mut start = 0;
    while start < n {
        let mut end = start;
        while end + 1 < n && pooled[idx[end + 1]] == pooled[idx[start]] {
            end += 1;
        }
        // Ranks are 1-based; a tie block spanning ranks start+1..=end+1
        // shares the average.
        let avg = (start + end) as f64 / 2.0 + 1.0;
        for &i in &idx[start..=end] {
            ranks[i] = avg;
        }
        start = end + 1;
    }
    ranks
}

/// Survival function of the chi-square distribution with one degree of
/// freedom: `P(X > x) = erfc(sqrt(x / 2))`.
fn chi2_sf_1df(x: f64) -> f64 {
    if x <= 0.0 {
        return 1.0;
    }
    statrs::function::erf::erfc((x / 2.0).sqrt())
}

/// Two-group Kruskal-Wallis test with tie correction: H is computed from the
/// average ranks, corrected by `1 - sum(t^3 - t) / (N^3 - N)`, and converted
/// to a p-value through the chi-square survival function with one degree of
/// freedom. Two groups with all values identical are defined to give p = 1.
pub fn kruskal_wallis(a: &[f64], b: &[f64]) -> Result<KwResult> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::InvalidArgument(
            "Kruskal-Wallis requires two nonempty groups".into(),
        ));
    }
    let n_a = a.len();
    let n_b = b.len();
    let n = n_a + n_b;

    let mut pooled = Vec::with_capacity(n);
    pooled.extend_from_slice(a);
    pooled.extend_from_slice(b);
    let ranks = average_ranks(&pooled);

    // Mean ranks per group; identical groups give exactly equal sums, so H
    // is exactly zero there.
    let r_a: f64 = ranks[..n_a].iter().sum::<f64>() / n_a as f64;
    let r_b: f64 = ranks[n_a..].iter().sum::<f64>() / n_b as f64;
    let grand = (n as f64 + 1.0) / 2.0;
    let numerator = 12.0 / (n as f64 * (n as f64 + 1.0))
        * (n_a as f64 * (r_a - grand) * (r_a - grand) + n_b as f64 * (r_b - grand) * (r_b - grand));

    // Tie correction over pooled tie blocks.
    let mut sorted = pooled.clone();
    sorted.sort_by(|x, y| x.partial_cmp(y).expect("finite deviations"));
    let mut tie_sum = 0.0;
    let mut start = 0;
    while start < n {
        let mut end = start;
        while end + 1 < n && sorted[end + 1] == sorted[start] {
            end += 1;
        }
        let t = (end - start + 1) as f64;
        tie_sum += t * t * t - t;
        start = end + 1;
    }
    let correction = 1.0 - tie_sum / ((n as f64).powi(3) - n as f64);

    let (h, p) = if correction <= 0.0 {
        // Every pooled value identical: H is undefined; define p = 1.
        (0.0, 1.0)
    } else {
        let h = numerator / correction;
        (h, if h == 0.0 { 1.0 } else { chi2_sf_1df(h) })
    };
    Ok(KwResult {
        h_statistic: h,
        p_value: p,
        group_sizes: [n_a, n_b],
    })
}

/// Pairwise p-value matrix over all disturbed coordinates, slots 0..n of the
/// x control first, then slots 0..n of the z control. Entries for empty
/// distributions are NaN (missing), never fabricated.
pub struct PvalueMatrix {
    pub values: Array2<f64>,
    pub missing: usize,
    pub slots: usize,
}

impl PvalueMatrix {
    /// Column/row label in the canonical coordinate order.
    pub fn label(&self, index: usize) -> String {
        if index < self.slots {
            format!("x{index}")
        } else {
            format!("z{}", index - self.slots)
        }
    }
}

pub fn pvalue_matrix(d: &VariationDistributions, slots: usize) -> Result<PvalueMatrix> {
    let side = 2 * slots;
    let coord = |k: usize| -> (usize, usize) {
        if k < slots {
            (k, Control::X.index())
        } else {
            (k - slots, Control::Z.index())
        }
    };

    let mut values = Array2::from_elem((side, side), f64::NAN);
    let mut missing = 0;
    for row in 0..side {
        for col in row..side {
            let a = d.groups.get(&coord(row)).map(|v| v.as_slice()).unwrap_or(&[]);
            let b = d.groups.get(&coord(col)).map(|v| v.as_slice()).unwrap_or(&[]);
            if a.is_empty() || b.is_empty() {
                missing += 1;
                continue;
            }
            let p = if row == col {
                1.0
            } else {
                kruskal_wallis(a, b)?.p_value
            };
            values[[row, col]] = p;
            values[[col, row]] = p;
        }
    }
    Ok(PvalueMatrix {
        values,
        missing,
        slots,
    })
}

/// Equal-width histogram over [min, max]; a degenerate range falls back to a
/// unit-width bin around the single value.
pub fn histogram(deviations: &[f64], bins: usize) -> Result<(Vec<f64>, Vec<usize>)> {
    if deviations.is_empty() {
        return Err(Error::InvalidArgument("histogram of an empty sample".into()));
    }
    if bins == 0 {
        return Err(Error::InvalidArgument("histogram needs at least one bin".into()));
    }
    let min = deviations.iter().cloned().fold(f64::INFINITY, f64::min);
    let max = deviations.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let (lo, width) = if max > min {
        (min, (max - min) / bins as f64)
    } else {
        (min - 0.5, 1.0 / bins as f64)
    };
    let edges: Vec<f64> = (0..=bins).map(|k| lo + width * k as f64).collect();
    let mut counts = vec![0usize; bins];
    for &v in deviations {
        let mut bin = ((v - lo) / width) as usize;
        if bin >= bins {
            bin = bins - 1;
        }
        counts[bin] += 1;
    }
    Ok((edges, counts))
}

/// CSV with columns `slot,control,deviation`, one row per sample.
pub fn write_distributions_csv(path: &Path, d: &VariationDistributions) -> Result<()> {
    let mut file = std::io::BufWriter::new(std::fs::File::create(path)?);
    writeln!(file, "slot,control,deviation")?;
    for ((slot, control_idx), deviations) in &d.groups {
        let control = if *control_idx == 0 { "x" } else { "z" };
        for dev in deviations {
            writeln!(file, "{slot},{control},{dev}")?;
        }
    }
    file.flush()?;
    Ok(())
}

/// CSV of the p-value matrix with row/column labels; missing entries are
/// written as `NA`.
pub fn write_pvalues_csv(path: &Path, m: &PvalueMatrix) -> Result<()> {
    let side = 2 * m.slots;
    let mut file = std::io::BufWriter::new(std::fs::File::create(path)?);
    let header: Vec<String> = (0..side).map(|k| m.label(k)).collect();
    writeln!(file, "coord,{}", header.join(","))?;
    for row in 0..side {
        let cells: Vec<String> = (0..side)
            .map(|col| {
                let v = m.values[[row, col]];
                if v.is_nan() {
                    "NA".to_string()
                } else {
                    format!("{v}")
                }
            })
            .collect();
        writeln!(file, "{},{}", m.label(row), cells.join(","))?;
    }
    file.flush()?;
    Ok(())
}

/// CSV with one histogram row per (coordinate, bin):
/// `slot,control,bin_left,bin_right,count`.
pub fn write_histograms_csv(path: &Path, d: &VariationDistributions, bins: usize) -> Result<()> {
    let mut file = std::io::BufWriter::new(std::fs::File::create(path)?);
    writeln!(file, "slot,control,bin_left,bin_right,count")?;
    for ((slot, control_idx), deviations) in &d.groups {
        if deviations.is_empty() {
            continue;
        }
        let control = if *control_idx == 0 { "x" } else { "z" };
        let (edges, counts) = histogram(deviations, bins)?;
        for (k, count) in counts.iter().enumerate() {
            writeln!(file, "{slot},{control},{},{},{count}", edges[k], edges[k + 1])?;
        }
    }
    file.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::presets::SystemConfig;
    use crate::rng::RngSeed;
    use rand::Rng;

    #[test]
    fn perturb_applies_the_boundary_rule() {
        let mut values = Array2::zeros((4, 2));
        values[[1, 0]] = 0.3;
        values[[2, 1]] = 0.95;
        let p = ControlPulses::new(values).unwrap();

        let up = perturb(&p, 1, Control::X, 0.1).unwrap();
        assert!((up.value(1, Control::X) - 0.4).abs() < 1e-15);

        let down = perturb(&p, 2, Control::Z, 0.1).unwrap();
        assert!((down.value(2, Control::Z) - 0.85).abs() < 1e-15);

        // Exactly one coordinate changes.
        let diff: usize = up
            .values()
            .iter()
            .zip(p.values().iter())
            .filter(|(a, b)| a != b)
            .count();
        assert_eq!(diff, 1);

        assert!(perturb(&p, 0, Control::X, 0.0).is_err());
        assert!(perturb(&p, 0, Control::X, 2.0).is_err());
    }

    #[test]
    fn kruskal_wallis_matches_hand_computation() {
        // Ranks 1..6, rank sums 6 and 15: H = 27/7.
        let r = kruskal_wallis(&[1.0, 2.0, 3.0], &[4.0, 5.0, 6.0]).unwrap();
        assert!((r.h_statistic - 27.0 / 7.0).abs() < 1e-12);
        assert_eq!(r.group_sizes, [3, 3]);
        // Frozen from the chi-square survival function at 27/7 with 1 dof;
        // the erfc approximation is good to ~1e-12.
        assert!((r.p_value - 0.04953461343562674).abs() < 1e-9);
    }

    #[test]
    fn identical_groups_give_h_zero_p_one_exactly() {
        let a = vec![0.3, 1.7, 2.9, 0.3];
        let r = kruskal_wallis(&a, &a).unwrap();
        assert_eq!(r.h_statistic, 0.0);
        assert_eq!(r.p_value, 1.0);

        // All values identical across both groups: tie correction degenerates.
        let r = kruskal_wallis(&[2.0, 2.0], &[2.0, 2.0, 2.0]).unwrap();
        assert_eq!(r.p_value, 1.0);
    }

    #[test]
    fn kruskal_wallis_is_symmetric_and_rank_based() {
        let mut rng = RngSeed::new(5, 0).rng();
        for _ in 0..10 {
            let a: Vec<f64> = (0..8).map(|_| rng.gen_range(0.0..1.0)).collect();
            let b: Vec<f64> = (0..12).map(|_| rng.gen_range(0.0..1.0)).collect();
            let ab = kruskal_wallis(&a, &b).unwrap();
            let ba = kruskal_wallis(&b, &a).unwrap();
            assert_eq!(ab.h_statistic, ba.h_statistic);
            assert_eq!(ab.p_value, ba.p_value);

            // Strictly monotone transformations leave ranks unchanged.
            let f = |x: f64| (3.0 * x).exp() + 0.5 * x;
            let fa: Vec<f64> = a.iter().map(|&x| f(x)).collect();
            let fb: Vec<f64> = b.iter().map(|&x| f(x)).collect();
            let tf = kruskal_wallis(&fa, &fb).unwrap();
            assert!((tf.h_statistic - ab.h_statistic).abs() < 1e-10);
        }
    }

    #[test]
    fn null_p_values_are_roughly_uniform() {
        // Samples from one continuous distribution: p should be uniform on
        // [0, 1]. Kolmogorov-Smirnov against the uniform CDF at 5% tolerance.
        let mut rng = RngSeed::new(6, 0).rng();
        let trials = 1000;
        let mut ps: Vec<f64> = (0..trials)
            .map(|_| {
                let a: Vec<f64> = (0..30).map(|_| rng.gen_range(0.0..1.0)).collect();
                let b: Vec<f64> = (0..30).map(|_| rng.gen_range(0.0..1.0)).collect();
                kruskal_wallis(&a, &b).unwrap().p_value
            })
            .collect();
        ps.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let ks = ps
            .iter()
            .enumerate()
            .map(|(i, &p)| {
                let lo = i as f64 / trials as f64;
                let hi = (i + 1) as f64 / trials as f64;
                (p - lo).abs().max((p - hi).abs())
            })
            .fold(0.0_f64, f64::max);
        assert!(ks < 0.05, "KS distance {ks}");
    }

    #[test]
    fn histogram_conserves_counts() {
        let data = vec![0.0, 1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 7.0, 8.0, 9.0];
        let (edges, counts) = histogram(&data, 10).unwrap();
        assert_eq!(edges.len(), 11);
        assert_eq!(counts, vec![1; 10]);
        assert_eq!(counts.iter().sum::<usize>(), data.len());

        let (edges, counts) = histogram(&[1.5], 4).unwrap();
        assert_eq!(counts.iter().sum::<usize>(), 1);
        assert!(edges[0] < 1.5 && 1.5 < edges[4]);

        assert!(histogram(&[], 4).is_err());
        assert!(histogram(&[1.0], 0).is_err());
    }

    fn tiny_testset(n: usize, slots: usize) -> Vec<(u64, TrainExample)> {
        // Targets chosen as the zero-pulse evolution so the zero model is
        // admitted everywhere.
        let cfg = SystemConfig {
            gamma: 0.2,
            slots,
            ..SystemConfig::default()
        };
        let sys = cfg.drifted().unwrap();
        let mut rng = RngSeed::new(77, 0).rng();
        (0..n as u64)
            .map(|id| {
                let ncp = ControlPulses::new(Array2::from_shape_fn((slots, 2), |_| {
                    rng.gen_range(-0.5..0.5)
                }))
                .unwrap();
                let target = evolve(&sys, &ControlPulses::zeros(slots));
                (id, TrainExample { ncp, target })
            })
            .collect()
    }

    #[test]
    fn constant_model_yields_zero_deviations() {
        // The zero model maps every input to zero pulses, so every deviation
        // is exactly zero and every coordinate group fills up.
        let slots = 6;
        let cfg = SystemConfig {
            gamma: 0.2,
            slots,
            ..SystemConfig::default()
        };
        let sys = cfg.drifted().unwrap();
        let model = ModelParams::zeros(2);
        let testset = tiny_testset(3, slots);
        let d = sensitivity_scan(&model, &testset, &sys, 0.1).unwrap();
        assert_eq!(d.groups.len(), 2 * slots);
        assert_eq!(d.skipped_records, 0);
        for group in d.groups.values() {
            assert_eq!(group.len(), 3);
            assert!(group.iter().all(|&v| v == 0.0));
        }

        // eps = 0 keeps the input identical: also all-zero deviations.
        let d0 = sensitivity_scan(&model, &testset, &sys, 0.0).unwrap();
        for group in d0.groups.values() {
            assert!(group.iter().all(|&v| v == 0.0));
        }
    }

    #[test]
    fn scan_is_deterministic() {
        let slots = 4;
        let cfg = SystemConfig {
            gamma: 0.2,
            slots,
            ..SystemConfig::default()
        };
        let sys = cfg.drifted().unwrap();
        let model = ModelParams::init(2, RngSeed::new(93, 0));
        let testset = tiny_testset(3, slots);
        let a = sensitivity_scan(&model, &testset, &sys, 0.1).unwrap();
        let b = sensitivity_scan(&model, &testset, &sys, 0.1).unwrap();
        assert_eq!(a.groups, b.groups);
        assert_eq!(a.skipped_records, b.skipped_records);
    }

    #[test]
    fn pvalue_matrix_is_symmetric_with_unit_diagonal() {
        let slots = 4;
        let mut d = VariationDistributions {
            epsilon: 0.1,
            ..Default::default()
        };
        let mut rng = RngSeed::new(101, 0).rng();
        for slot in 0..slots {
            for control in Control::ALL {
                let group: Vec<f64> = (0..20).map(|_| rng.gen_range(0.0..1.0)).collect();
                d.groups.insert((slot, control.index()), group);
            }
        }
        let m = pvalue_matrix(&d, slots).unwrap();
        assert_eq!(m.missing, 0);
        let side = 2 * slots;
        for i in 0..side {
            assert_eq!(m.values[[i, i]], 1.0);
            for j in 0..side {
                assert_eq!(m.values[[i, j]], m.values[[j, i]]);
                assert!((0.0..=1.0).contains(&m.values[[i, j]]));
            }
        }

        // An empty group is reported missing, not fabricated.
        d.groups.get_mut(&(0, 0)).unwrap().clear();
        let m = pvalue_matrix(&d, slots).unwrap();
        assert!(m.values[[0, 0]].is_nan());
        assert!(m.values[[0, 3]].is_nan());
        assert!(m.missing > 0);
    }

    #[test]
    fn csv_outputs_have_stable_schema() {
        let slots = 2;
        let mut d = VariationDistributions {
            epsilon: 0.1,
            ..Default::default()
        };
        for slot in 0..slots {
            for control in Control::ALL {
                d.groups
                    .insert((slot, control.index()), vec![0.1 * (slot + 1) as f64, 0.2, 0.3]);
            }
        }
        let dir = tempfile::tempdir().unwrap();
        let dist_path = dir.path().join("distributions.csv");
        write_distributions_csv(&dist_path, &d).unwrap();
        let text = std::fs::read_to_string(&dist_path).unwrap();
        assert!(text.starts_with("slot,control,deviation\n"));
        assert_eq!(text.lines().count(), 1 + 4 * 3);

        let m = pvalue_matrix(&d, slots).unwrap();
        let pv_path = dir.path().join("pvalues.csv");
        write_pvalues_csv(&pv_path, &m).unwrap();
        let text = std::fs::read_to_string(&pv_path).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next().unwrap(), "coord,x0,x1,z0,z1");
        assert_eq!(text.lines().count(), 1 + 4);

        let hist_path = dir.path().join("histograms.csv");
        write_histograms_csv(&hist_path, &d, 4).unwrap();
        let text = std::fs::read_to_string(&hist_path).unwrap();
        assert!(text.starts_with("slot,control,bin_left,bin_right,count\n"));
        assert_eq!(text.lines().count(), 1 + 4 * 4);
    }
}
