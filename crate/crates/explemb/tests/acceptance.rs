//! Acceptance gate: one test per criterion, each printing a single
//! `criterion N (...): pass` line (or `SKIP` for the conditional dataset
//! reproduction) before its assertions.

use std::path::{Path, PathBuf};
use std::time::Instant;

use ndarray::{array, Array1, Array2};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use explemb::dataset::{self, Explanations, Labels, Split, SyntheticSpec};
use explemb::experiment::{self, config::ConfigFile, config::ExperimentConfig, gradcheck};
use explemb::knn::{self, BandwidthPolicy, Metric};
use explemb::metrics::Discretizer;
use explemb::oracle;
use explemb::pairloss::{self, LossParams, PairRelation};

fn verdict(n: usize, what: &str, ok: bool) {
    println!("criterion {n} ({what}): {}", if ok { "pass" } else { "FAIL" });
    assert!(ok, "criterion {n} ({what}) failed");
}

#[test]
fn criterion_1_gradient_correctness() {
    let start = Instant::now();
    let report = gradcheck::run_gradcheck(20, 1e-4, 1e-5);
    let elapsed = start.elapsed().as_secs_f64();
    let all_pass = report.len() == 6 && report.iter().all(|e| e.pass);
    for e in &report {
        println!(
            "  {} max relative error {:.3e}",
            e.loss, e.max_relative_error
        );
    }
    verdict(1, "gradient correctness", all_pass && elapsed < 30.0);
}

#[test]
fn criterion_2_pairwise_loss_unit_values() {
    let f = array![0.3, -1.2, 0.7];
    let neighbor = pairloss::loss_xy(f.view(), f.view(), PairRelation::Neighbor, 0.25);
    let non_neighbor = pairloss::loss_xy(f.view(), f.view(), PairRelation::NonNeighbor, 0.25);
    let exact_zero = neighbor == 0.0;
    let margin_ok = (non_neighbor - 0.75).abs() <= 1e-12;

    // combined loss with w = 0 must equal the Y-space loss bit for bit
    let params = LossParams {
        m1: 0.25,
        m2: 0.4,
        w: 0.0,
    };
    let mut rng = ChaCha8Rng::seed_from_u64(42);
    let rels = [
        PairRelation::Neighbor,
        PairRelation::NonNeighbor,
        PairRelation::Excluded,
    ];
    let mut bit_for_bit = true;
    for _ in 0..1000 {
        let a = Array1::from_shape_fn(5, |_| rng.gen_range(-2.0..2.0));
        let b = Array1::from_shape_fn(5, |_| rng.gen_range(-2.0..2.0));
        let rel_y = rels[rng.gen_range(0..3)];
        let rel_e = rels[rng.gen_range(0..3)];
        let combined = pairloss::loss_combined(a.view(), b.view(), rel_y, rel_e, &params);
        let y_only = pairloss::loss_xy(a.view(), b.view(), rel_y, params.m1);
        bit_for_bit &= combined.to_bits() == y_only.to_bits();
    }
    verdict(
        2,
        "pairwise loss unit values",
        exact_zero && margin_ok && bit_for_bit,
    );
}

#[test]
fn criterion_3_knn_exactness() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut ok = true;
    for case in 0..200 {
        let n = rng.gen_range(2..=500usize);
        let d = rng.gen_range(1..=64usize);
        let k = rng.gen_range(1..=n.min(25));
        let metric = if case % 2 == 0 {
            Metric::Euclidean
        } else {
            Metric::Cosine
        };
        let points = Array2::from_shape_fn((n, d), |_| rng.gen_range(-3.0..3.0));
        let query: Vec<f64> = (0..d).map(|_| rng.gen_range(-3.0..3.0)).collect();
        let index = knn::build_index(
            points.clone(),
            Labels::Continuous(Array1::zeros(n)),
            Explanations::Continuous(Array2::zeros((n, 1))),
            metric,
            BandwidthPolicy::MedianDistance,
        )
        .unwrap();
        let nbhd = index.query(Array1::from_vec(query.clone()).view(), k).unwrap();
        let (oracle_idx, oracle_dist) = oracle::knn_exhaustive(&points, &query, k, metric.tag());
        ok &= nbhd.indices == oracle_idx;
        ok &= nbhd
            .distances
            .iter()
            .zip(&oracle_dist)
            .all(|(a, b)| (a - b).abs() <= 1e-12);
        let weight_sum: f64 = nbhd.weights.iter().sum();
        ok &= (weight_sum - 1.0).abs() <= 1e-12;
        ok &= nbhd.weights.windows(2).all(|w| w[0] >= w[1]);
        if !ok {
            println!("  first failing case: {case} (n={n}, d={d}, k={k}, {})", metric.tag());
            break;
        }
    }
    verdict(3, "kNN exactness", ok);
}

#[test]
fn criterion_4_metric_fidelity() {
    let y = Discretizer::new(33.66, 49.68).unwrap();
    // boundary convention: v < t1 -> -1, t1 <= v < t2 -> 0, v >= t2 -> 1
    let fixture_y = [
        (0.0, -1),
        (33.65, -1),
        (33.66, 0),
        (33.67, 0),
        (40.0, 0),
        (49.67, 0),
        (49.68, 1),
        (49.69, 1),
        (100.0, 1),
        (-5.0, -1),
        (33.659, -1),
        (49.679, 0),
    ];
    let mut ok = fixture_y.iter().all(|&(v, b)| y.bin(v) == b);

    let e = Discretizer::new(2.72, 6.57).unwrap();
    let fixture_e = [
        (0.0, -1),
        (2.71, -1),
        (2.72, 0),
        (2.73, 0),
        (4.0, 0),
        (6.56, 0),
        (6.57, 1),
        (6.58, 1),
        (10.0, 1),
        (-1.0, -1),
        (2.719, -1),
        (6.569, 0),
    ];
    ok &= fixture_e.iter().all(|&(v, b)| e.bin(v) == b);

    // discretized MAE of a top-bin prediction against a bottom-bin truth
    let pred = explemb::metrics::discretize(&array![100.0], &y);
    let truth = explemb::metrics::discretize(&array![0.0], &y);
    ok &= explemb::metrics::mae(&pred, &truth).unwrap() == 2.0;
    verdict(4, "metric fidelity", ok);
}

/// Synthetic data config shared by criteria 5, 6, and 8. The neighbor
/// thresholds are quantiles of the generated training distances so the
/// continuous rule yields a sensible neighbor/non-neighbor mix at any scale.
fn synthetic_config(
    out_dir: &Path,
    arms: &str,
    ks: &str,
    data_seed: u64,
    master_seed: u64,
) -> ExperimentConfig {
    let spec = SyntheticSpec {
        n_samples: 500,
        n_features: 50,
        n_latent: 4,
        label_noise: 0.0,
        feature_noise: 1.0,
        explanation_rule: dataset::ExplanationRule::Linear { n_outputs: 4 },
        seed: data_seed,
    };
    let d = dataset::generate_synthetic(&spec).unwrap();
    // neighbors below the 30th distance percentile, non-neighbors above the
    // 55th; the band between is excluded from the loss
    let (c1, c3) = distance_quantiles(&d, 0.30);
    let (c2, c4) = distance_quantiles(&d, 0.55);
    let text = format!(
        "[dataset]\nsource = synthetic\nn_samples = 500\nn_features = 50\nn_latent = 4\n\
         n_explanations = 4\nlabel_noise = 0.0\nfeature_noise = 1.0\ndata_seed = {data_seed}\n\n\
         [preprocess]\nsplit = 400,0,100\nstandardize = true\n\n\
         [arms]\nrun = {arms}\n\n\
         [train]\nepochs = 60\nbatch_size = 64\nlearning_rate = 0.005\nembedding_width = 32\n\n\
         [pairwise]\nn_pairs = 6000\nepochs = 150\nbatch_size = 64\nlearning_rate = 0.05\n\
         c1 = {c1:.6}\nc2 = {c2:.6}\nc3 = {c3:.6}\nc4 = {c4:.6}\nm1 = 0.25\nm2 = 0.25\nw = 1.0\n\n\
         [knn]\nks = {ks}\n\n\
         [experiment]\nseed = {master_seed}\nout_dir = {}\n",
        out_dir.display()
    );
    ExperimentConfig::from_file(ConfigFile::parse(&text).unwrap()).unwrap()
}

/// The q-quantile of pairwise l1 distances in Y and in E over a sample of
/// training pairs.
fn distance_quantiles(d: &dataset::Dataset, q: f64) -> (f64, f64) {
    let rows = d.rows_of(Split::Train);
    let y = match &d.labels {
        Labels::Continuous(v) => v.clone(),
        _ => panic!("continuous labels expected"),
    };
    let e = match &d.explanations {
        Explanations::Continuous(m) => m.clone(),
        _ => panic!("continuous explanations expected"),
    };
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut dy = Vec::new();
    let mut de = Vec::new();
    for _ in 0..4000 {
        let a = rows[rng.gen_range(0..rows.len())];
        let b = rows[rng.gen_range(0..rows.len())];
        if a == b {
            continue;
        }
        dy.push((y[a] - y[b]).abs());
        de.push(
            e.row(a)
                .iter()
                .zip(e.row(b).iter())
                .map(|(p, q)| (p - q).abs())
                .sum::<f64>(),
        );
    }
    dy.sort_by(|a, b| a.partial_cmp(b).unwrap());
    de.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let at = |v: &[f64]| v[((v.len() as f64) * q) as usize];
    (at(&dy), at(&de))
}

fn accuracy_at_k(report: &explemb::metrics::MetricsReport, arm: &str, k: &str) -> f64 {
    report
        .rows
        .iter()
        .find(|r| r.arm == arm && r.param == k)
        .and_then(|r| r.y_accuracy)
        .unwrap_or_else(|| panic!("missing y accuracy for {arm} at k={k}"))
}

#[test]
fn criterion_5_synthetic_end_to_end() {
    let start = Instant::now();
    let mut pairwise_sum = 0.0;
    let mut baseline_sum = 0.0;
    for seed in 0..5u64 {
        let dir = tempfile::tempdir().unwrap();
        let config = synthetic_config(
            dir.path(),
            "embed_y_knn,pairwise_ye_knn",
            "5",
            100 + seed,
            seed,
        );
        let summary = experiment::run_experiment(&config).unwrap();
        assert!(summary.failed_arms.is_empty(), "{:?}", summary.failed_arms);
        let p = accuracy_at_k(&summary.report, "pairwise_ye_knn", "5");
        let b = accuracy_at_k(&summary.report, "embed_y_knn", "5");
        println!("  seed {seed}: pairwise_ye_knn {p:.4} vs embed_y_knn {b:.4}");
        pairwise_sum += p;
        baseline_sum += b;
    }
    let elapsed = start.elapsed().as_secs_f64();
    println!(
        "  mean pairwise {:.4} vs mean baseline {:.4} in {elapsed:.1}s",
        pairwise_sum / 5.0,
        baseline_sum / 5.0
    );
    verdict(
        5,
        "synthetic end-to-end",
        pairwise_sum >= baseline_sum && elapsed < 300.0,
    );
}

const ALL_ARMS: &str = "baseline_y,baseline_e,multitask,embed_y_knn,embed_e_knn,\
                        pairwise_y_knn,pairwise_e_knn,pairwise_ye_knn";

#[test]
fn criterion_6_determinism() {
    let dir_a = tempfile::tempdir().unwrap();
    let dir_b = tempfile::tempdir().unwrap();
    let a = synthetic_config(dir_a.path(), ALL_ARMS, "1,5", 11, 4);
    let b = synthetic_config(dir_b.path(), ALL_ARMS, "1,5", 11, 4);
    experiment::run_experiment(&a).unwrap();
    experiment::run_experiment(&b).unwrap();
    let same = |name: &str| {
        std::fs::read(dir_a.path().join(name)).unwrap()
            == std::fs::read(dir_b.path().join(name)).unwrap()
    };
    verdict(6, "determinism", same("report.json") && same("report.txt"));
}

fn olfactory_dir() -> Option<PathBuf> {
    if let Ok(dir) = std::env::var("EXPLEMB_OLFACTORY_DIR") {
        let p = PathBuf::from(dir);
        if p.join("data.csv").exists() {
            return Some(p);
        }
    }
    let default = Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("../../data/olfactory");
    if default.join("data.csv").exists() {
        return Some(default);
    }
    None
}

#[test]
fn criterion_7_olfactory_reproduction() {
    let Some(dir) = olfactory_dir() else {
        println!("criterion 7 (olfactory reproduction): SKIP (dataset not present)");
        return;
    };
    let out = tempfile::tempdir().unwrap();
    let text = format!(
        "[dataset]\nsource = csv\ncsv_path = {}\nschema_path = {}\n\n\
         [preprocess]\nsplit = 338,69,69\nlog_transform = true\nstandardize = true\nselect_k = 200\n\n\
         [arms]\nrun = pairwise_ye_knn\n\n\
         [train]\nepochs = 750\nbatch_size = 338\nlearning_rate = 0.0001\n\
         embedding_width = 64\nactivation = identity\n\n\
         [pairwise]\nn_pairs = 100000\nepochs = 750\nbatch_size = 338\nlearning_rate = 0.0001\n\
         c1 = 10\nc2 = 20\nc3 = 0.0272\nc4 = 0.0272\nm1 = 0.25\nm2 = 0.25\nw = 1.0\n\n\
         [knn]\nks = 1\n\n\
         [metrics]\ny_thresholds = 33.66,49.68\ne_thresholds = 2.72,6.57\n\n\
         [experiment]\nseed = 1\nout_dir = {}\n",
        dir.join("data.csv").display(),
        dir.join("schema.cfg").display(),
        out.path().display()
    );
    let config = ExperimentConfig::from_file(ConfigFile::parse(&text).unwrap()).unwrap();
    let summary = experiment::run_experiment(&config).unwrap();
    let acc = accuracy_at_k(&summary.report, "pairwise_ye_knn", "1");
    println!("  pairwise_ye_knn k=1 accuracy {acc:.4}");
    verdict(7, "olfactory reproduction", (acc - 0.6522).abs() <= 0.10);
}

#[test]
fn criterion_8_table_shape() {
    let dir = tempfile::tempdir().unwrap();
    let knn_arms = "embed_y_knn,embed_e_knn,pairwise_y_knn,pairwise_e_knn,pairwise_ye_knn";
    let config = synthetic_config(dir.path(), knn_arms, "1,2,5,10,15,20", 13, 2);
    let summary = experiment::run_experiment(&config).unwrap();
    assert!(summary.failed_arms.is_empty(), "{:?}", summary.failed_arms);
    let ks = ["1", "2", "5", "10", "15", "20"];
    let mut ok = true;
    for arm in knn_arms.split(',') {
        let params: Vec<&str> = summary
            .report
            .rows
            .iter()
            .filter(|r| r.arm == arm)
            .map(|r| r.param.as_str())
            .collect();
        ok &= params == ks;
        for r in summary.report.rows.iter().filter(|r| r.arm == arm) {
            ok &= r.y_accuracy.is_some()
                && r.y_mae_discretized.is_some()
                && r.y_mae_continuous.is_some()
                && r.e_mae_discretized.is_some()
                && r.e_mae_continuous.is_some();
        }
    }
    verdict(8, "table shape", ok);
}
