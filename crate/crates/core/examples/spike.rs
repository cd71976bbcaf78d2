use nmfk_core::mlp::{train, TrainConfig};
use nmfk_core::nmf::NmfConfig;
use nmfk_core::pipeline::{evaluate_scans, MethodTag};
use nmfk_core::rng::RngSeed;
use nmfk_core::scan::{scan, KScanRecord, ScanConfig};
use nmfk_core::synth::generate_corpus;
use nmfk_core::window::{build_training_set, validation_split};
use std::time::Instant;

fn main() {
    let args: Vec<String> = std::env::args().collect();
    let count: usize = args.get(1).and_then(|s| s.parse().ok()).unwrap_or(60);
    let r: usize = args.get(2).and_then(|s| s.parse().ok()).unwrap_or(10);
    let tol: f64 = args.get(3).and_then(|s| s.parse().ok()).unwrap_or(1e-6);
    let max_iter: usize = args.get(4).and_then(|s| s.parse().ok()).unwrap_or(600);
    let lambda: f64 = args.get(5).and_then(|s| s.parse().ok()).unwrap_or(0.01);

    let t0 = Instant::now();
    let corpus = generate_corpus(count, (50, 150), (2, 10), RngSeed::new(42)).unwrap();
    println!("generated {} matrices in {:.1}s", corpus.len(), t0.elapsed().as_secs_f64());

    let t1 = Instant::now();
    let scans: Vec<(usize, Vec<KScanRecord>)> = corpus
        .iter()
        .enumerate()
        .map(|(i, lm)| {
            let cfg = ScanConfig {
                k_min: 1,
                k_max: 16,
                ensemble_size: r,
                resample_noise: 0.03,
                nmf: NmfConfig { max_iterations: max_iter, convergence_tol: tol, ..NmfConfig::default() },
                cluster_max_iter: 100,
                seed: RngSeed::new(1000).derive(i as u64),
            };
            let recs = scan(&lm.x, &cfg).unwrap();
            (lm.k_true, recs)
        })
        .collect();
    let scan_time = t1.elapsed().as_secs_f64();
    println!("scanned {} matrices in {:.1}s ({:.2}s each)", scans.len(), scan_time, scan_time / count as f64);

    // split: 80% train matrices, 20% eval
    let n_eval = count / 5;
    let eval_scans: Vec<(usize, Vec<KScanRecord>)> = scans[count - n_eval..].to_vec();
    let train_scans: Vec<(usize, Vec<KScanRecord>)> = scans[..count - n_eval].to_vec();

    // matrix-level 90/10 validation split inside the training matrices
    let (tr_idx, val_idx) = validation_split(train_scans.len(), 0.1, RngSeed::new(7));
    let tr: Vec<(usize, Vec<KScanRecord>)> = tr_idx.iter().map(|&i| train_scans[i].clone()).collect();
    let va: Vec<(usize, Vec<KScanRecord>)> = val_idx.iter().map(|&i| train_scans[i].clone()).collect();
    let train_set = build_training_set(&tr).unwrap();
    let val_set = build_training_set(&va).unwrap();
    println!("training windows: {}, validation windows: {}", train_set.len(), val_set.len());

    let t2 = Instant::now();
    let cfg = TrainConfig { l2_lambda: lambda, seed: RngSeed::new(5), ..TrainConfig::default() };
    let model = train(&train_set, &val_set, &cfg).unwrap();
    println!(
        "trained in {:.1}s: epochs={}, val acc={:.3}",
        t2.elapsed().as_secs_f64(),
        model.metadata.epochs_trained,
        model.metadata.validation_accuracy
    );

    let methods = [MethodTag::MlpVote, MethodTag::AicArgmin, MethodTag::SilhouetteThreshold];
    let (_rows, summaries) = evaluate_scans(&eval_scans, Some(&model), &methods, 5, 0.75).unwrap();
    for s in &summaries {
        println!("{:>22}: exact {:.3}, within±1 {:.3} (n={})", s.method.to_string(), s.exact_rate, s.within_one_rate, s.evaluated);
    }
    // also self-evaluate on training matrices for a sanity ceiling
    let (_r2, s2) = evaluate_scans(&train_scans, Some(&model), &[MethodTag::MlpVote], 5, 0.75).unwrap();
    println!("train-matrix mlp exact: {:.3}, within±1 {:.3}", s2[0].exact_rate, s2[0].within_one_rate);
}
