//! Finite-difference verification of every analytic gradient path: the head
//! losses (MSE, cross-entropy, multi-task) and the pairwise cosine losses
//! routed through the embedding.

use ndarray::Array2;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::network::{self, Activation, HeadTarget, LossSpec, Network};
use crate::oracle;
use crate::pairloss::{self, LossParams, PairMode, PairRelation, PairSample};

/// One verified loss path.
#[derive(Debug, Clone)]
pub struct GradCheckEntry {
    pub loss: &'static str,
    pub instances: usize,
    pub max_relative_error: f64,
    pub pass: bool,
}

/// Compare analytic and numeric gradients, skipping coordinates where a
/// halved-step estimate disagrees with the full-step one: there a rectifier
/// kink sits inside the difference stencil and the numeric value is
/// meaningless. At least 90% of coordinates must survive the mask.
fn masked_max_relative_error(analytic: &[f64], numeric: &[f64], numeric_half: &[f64]) -> f64 {
    let mut max_err = 0.0f64;
    let mut kept = 0usize;
    for i in 0..analytic.len() {
        let scale = 1.0f64.max(numeric[i].abs()).max(numeric_half[i].abs());
        if (numeric[i] - numeric_half[i]).abs() > 1e-6 * scale {
            continue;
        }
        kept += 1;
        let denom = 1.0f64.max(analytic[i].abs()).max(numeric[i].abs());
        max_err = max_err.max((analytic[i] - numeric[i]).abs() / denom);
    }
    assert!(
        kept * 10 >= analytic.len() * 9,
        "kink mask removed too many coordinates ({kept} of {})",
        analytic.len()
    );
    max_err
}

const LOSSES: [&str; 6] = [
    "mse",
    "cross_entropy",
    "multitask",
    "pairwise_y",
    "pairwise_e",
    "pairwise_combined",
];

/// Check every loss over `instances` seeded random 2-layer networks; an entry
/// passes when the worst relative error stays under `tolerance`.
pub fn run_gradcheck(instances: usize, tolerance: f64, step: f64) -> Vec<GradCheckEntry> {
    LOSSES
        .iter()
        .map(|&loss| {
            let mut max_err = 0.0f64;
            for seed in 0..instances as u64 {
                let err = check_instance(loss, seed, step);
                max_err = max_err.max(err);
            }
            GradCheckEntry {
                loss,
                instances,
                max_relative_error: max_err,
                pass: max_err < tolerance,
            }
        })
        .collect()
}

fn check_instance(loss: &str, seed: u64, step: f64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_mul(0x51_7c_c1_b7).wrapping_add(11));
    let n = 6;
    let d_in = 4;
    // 2-layer dense net: trunk d_in -> 5 -> 3, rectifier hidden units
    let mut net =
        Network::dense(&[d_in, 5, 3], &[2], Some(&[3]), Activation::Rectifier, seed).unwrap();
    // jitter every parameter so no bias is exactly zero: a zero bias fed a
    // clipped all-zero row puts a rectifier kink exactly at the evaluation
    // point, where finite differences and the subgradient legitimately differ
    let jittered: Vec<f64> = net
        .params_flat()
        .iter()
        .map(|p| p + rng.gen_range(0.01..0.1) * if rng.gen_bool(0.5) { 1.0 } else { -1.0 })
        .collect();
    net.set_params_flat(&jittered).unwrap();
    let x = Array2::from_shape_fn((n, d_in), |_| rng.gen_range(-1.0..1.0));

    match loss {
        "mse" | "cross_entropy" | "multitask" => {
            let y_reg = HeadTarget::Regression(Array2::from_shape_fn((n, 2), |_| {
                rng.gen_range(-1.0..1.0)
            }));
            let e_cls = HeadTarget::Classes((0..n).map(|_| rng.gen_range(0..3)).collect());
            let spec = match loss {
                "mse" => LossSpec::YOnly(y_reg),
                "cross_entropy" => LossSpec::EOnly(e_cls),
                _ => LossSpec::Multitask {
                    y: y_reg,
                    e: e_cls,
                    lambda: 0.6,
                },
            };
            let (_, grads) = network::backward(&net, &x, &spec).unwrap();
            let mut analytic = Vec::new();
            for g in grads
                .trunk
                .iter()
                .chain(grads.head_y.iter())
                .chain(grads.head_e.iter())
            {
                analytic.extend(g.d_weights.iter().copied());
                analytic.extend(g.d_bias.iter().copied());
            }
            let f = |p: &[f64]| {
                let mut n2 = net.clone();
                n2.set_params_flat(p).unwrap();
                network::backward(&n2, &x, &spec).unwrap().0
            };
            let numeric = oracle::finite_difference_grad(&f, &net.params_flat(), step);
            let numeric_half = oracle::finite_difference_grad(&f, &net.params_flat(), step / 2.0);
            masked_max_relative_error(&analytic, &numeric, &numeric_half)
        }
        "pairwise_y" | "pairwise_e" | "pairwise_combined" => {
            let mode = match loss {
                "pairwise_y" => PairMode::YOnly,
                "pairwise_e" => PairMode::EOnly,
                _ => PairMode::YAndE,
            };
            let params = LossParams {
                m1: 0.25,
                m2: 0.25,
                w: 0.8,
            };
            let rels = [PairRelation::Neighbor, PairRelation::NonNeighbor];
            let mut pairs: Vec<PairSample> = (0..4)
                .map(|i| PairSample {
                    a: rng.gen_range(0..n),
                    b: rng.gen_range(0..n),
                    rel_y: rels[i % 2],
                    rel_e: rels[(i / 2) % 2],
                })
                .filter(|p| p.a != p.b)
                .collect();
            // drop pairs whose cosine sits on the non-neighbor clamp boundary,
            // where the subgradient convention and finite differences diverge
            let emb = net.embed(&x).unwrap();
            pairs.retain(|p| {
                let cos = pairloss::cosine_similarity(emb.row(p.a), emb.row(p.b));
                (cos - params.m1).abs() > 1e-3 && (cos - params.m2).abs() > 1e-3
            });
            if pairs.is_empty() {
                pairs.push(PairSample {
                    a: 0,
                    b: 1,
                    rel_y: PairRelation::Neighbor,
                    rel_e: PairRelation::Neighbor,
                });
            }
            let (_, grads) =
                pairloss::batch_loss_and_trunk_grads(&net, &x, &pairs, &params, mode).unwrap();
            let mut analytic = Vec::new();
            for g in &grads {
                analytic.extend(g.d_weights.iter().copied());
                analytic.extend(g.d_bias.iter().copied());
            }
            // heads do not influence the pairwise loss; pad with exact zeros
            let trunk_params: usize = analytic.len();
            let total = net.params_flat().len();
            analytic.extend(std::iter::repeat(0.0).take(total - trunk_params));
            let f = |p: &[f64]| {
                let mut n2 = net.clone();
                n2.set_params_flat(p).unwrap();
                pairloss::batch_loss_and_trunk_grads(&n2, &x, &pairs, &params, mode)
                    .unwrap()
                    .0
            };
            let numeric = oracle::finite_difference_grad(&f, &net.params_flat(), step);
            let numeric_half = oracle::finite_difference_grad(&f, &net.params_flat(), step / 2.0);
            masked_max_relative_error(&analytic, &numeric, &numeric_half)
        }
        other => panic!("unknown loss {other}"),
    }
}
