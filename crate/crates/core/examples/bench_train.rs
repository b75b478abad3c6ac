use pulsecorr::dataset::build_dataset;
use pulsecorr::grape::OptimConfig;
use pulsecorr::lstm::{train, TrainConfig, TrainExample};
use pulsecorr::presets::SystemConfig;
use pulsecorr::rng::RngSeed;
use std::time::Instant;

fn main() {
    let args: Vec<String> = std::env::args().collect();
    let n_train: usize = args.get(1).map(|s| s.parse().unwrap()).unwrap_or(50);
    let n_test: usize = args.get(2).map(|s| s.parse().unwrap()).unwrap_or(20);
    let epochs: usize = args.get(3).map(|s| s.parse().unwrap()).unwrap_or(5);

    let sys_cfg = SystemConfig { gamma: 0.2, ..SystemConfig::default() };
    let t0 = Instant::now();
    let (records, summary) = build_dataset(n_train + n_test, &sys_cfg, RngSeed::new(1000, 0), false, &OptimConfig::default()).unwrap();
    println!("dataset {} records in {:?} (skipped {})", records.len(), t0.elapsed(), summary.skipped_streams.len());

    let examples: Vec<TrainExample> = records.iter().map(|r| TrainExample::from_record(r).unwrap()).collect();
    let (train_set, test_set) = examples.split_at(n_train);

    let cfg = TrainConfig {
        batch_size: 5,
        epochs,
        learning_rate: 1e-3,
        hidden_dim: 64,
        seed: RngSeed::new(2000, 0),
        system: sys_cfg,
    };
    let t0 = Instant::now();
    let (_params, history) = train(train_set, test_set, &cfg, RngSeed::new(3000, 0)).unwrap();
    for e in 0..history.train_err.len() {
        println!("epoch {e}: train_err {:.4} test_fid {:.4} ({:.2}s)", history.train_err[e], history.test_fidelity[e], history.epoch_seconds[e]);
    }
    println!("total train {:?}", t0.elapsed());
}
