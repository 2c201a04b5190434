//! Pairwise cosine-embedding losses, neighbor relations, and pair sampling.
//!
//! Neighbor pairs are pulled toward cosine similarity 1, non-neighbor pairs
//! are pushed below a margin, and pairs in the buffer zone between the two
//! thresholds are excluded from the loss.

use std::fmt;
use std::path::Path;

use ndarray::{Array1, Array2, ArrayView1};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::dataset::{Dataset, Explanations, Labels, Split};
use crate::error::{Error, Result};
use crate::network::{Network, TrainConfig};

/// Neighbor / non-neighbor decision rule for a pair of samples.
#[derive(Debug, Clone, PartialEq)]
pub enum NeighborSpec {
    /// l1-distance thresholds: (c1, c2) in Y space, (c3, c4) in E space.
    /// A gap c2 > c1 creates a buffer of excluded pairs.
    Continuous { c1: f64, c2: f64, c3: f64, c4: f64 },
    /// Categorical rules: Y-space neighbors iff y_a = y_b; E-space neighbors
    /// iff e_a = e_b, non-neighbors iff y_a != y_b, excluded otherwise.
    Categorical,
}

impl NeighborSpec {
    pub fn validate(&self) -> Result<()> {
        if let NeighborSpec::Continuous { c1, c2, c3, c4 } = *self {
            if !(c1 >= 0.0 && c2 >= c1 && c3 >= 0.0 && c4 >= c3) {
                return Err(Error::InvalidValue(
                    "neighbor thresholds need 0 <= c1 <= c2 and 0 <= c3 <= c4".into(),
                ));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PairRelation {
    Neighbor,
    NonNeighbor,
    Excluded,
}

impl PairRelation {
    pub fn tag(&self) -> &'static str {
        match self {
            PairRelation::Neighbor => "neighbor",
            PairRelation::NonNeighbor => "non_neighbor",
            PairRelation::Excluded => "excluded",
        }
    }

    pub fn from_tag(tag: &str) -> Result<PairRelation> {
        match tag {
            "neighbor" => Ok(PairRelation::Neighbor),
            "non_neighbor" => Ok(PairRelation::NonNeighbor),
            "excluded" => Ok(PairRelation::Excluded),
            other => Err(Error::InvalidValue(format!("unknown relation '{other}'"))),
        }
    }
}

impl fmt::Display for PairRelation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

/// Margins and the weight on the E-space loss.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossParams {
    pub m1: f64,
    pub m2: f64,
    pub w: f64,
}

impl LossParams {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.m1) || !(0.0..=1.0).contains(&self.m2) {
            return Err(Error::InvalidValue("margins must lie in [0, 1]".into()));
        }
        if self.w < 0.0 {
            return Err(Error::InvalidValue("pair weight w must be >= 0".into()));
        }
        Ok(())
    }
}

/// Which pairwise objective trains the embedding.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PairMode {
    YOnly,
    EOnly,
    YAndE,
}

/// Cosine similarity clamped to [-1, 1]; zero-norm vectors yield 0 (see
/// [`cosine_similarity_flagged`] for the diagnostic).
pub fn cosine_similarity(f_a: ArrayView1<f64>, f_b: ArrayView1<f64>) -> f64 {
    cosine_similarity_flagged(f_a, f_b).0
}

/// Returns (similarity, zero_norm_encountered).
pub fn cosine_similarity_flagged(f_a: ArrayView1<f64>, f_b: ArrayView1<f64>) -> (f64, bool) {
    debug_assert_eq!(f_a.len(), f_b.len());
    let na = f_a.dot(&f_a).sqrt();
    let nb = f_b.dot(&f_b).sqrt();
    if na == 0.0 || nb == 0.0 {
        return (0.0, true);
    }
    ((f_a.dot(&f_b) / (na * nb)).clamp(-1.0, 1.0), false)
}

/// Relation from the l1 distance of two continuous value vectors:
/// d <= c_lo -> Neighbor, d > c_hi -> NonNeighbor, else Excluded.
pub fn relation_continuous(
    v_a: ArrayView1<f64>,
    v_b: ArrayView1<f64>,
    c_lo: f64,
    c_hi: f64,
) -> Result<PairRelation> {
    if v_a.len() != v_b.len() {
        return Err(Error::ShapeMismatch(format!(
            "relation vectors {} vs {}",
            v_a.len(),
            v_b.len()
        )));
    }
    let d: f64 = v_a.iter().zip(v_b.iter()).map(|(a, b)| (a - b).abs()).sum();
    Ok(if d <= c_lo {
        PairRelation::Neighbor
    } else if d > c_hi {
        PairRelation::NonNeighbor
    } else {
        PairRelation::Excluded
    })
}

/// Which space a categorical relation is evaluated in.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RelationSpace {
    Y,
    E,
}

/// Categorical rules: in Y space, neighbors iff labels match. In E space,
/// neighbors iff explanation groups match, non-neighbors iff labels differ,
/// and excluded when the groups differ but the labels agree.
pub fn relation_categorical(
    y_a: usize,
    y_b: usize,
    e_a: usize,
    e_b: usize,
    space: RelationSpace,
) -> PairRelation {
    match space {
        RelationSpace::Y => {
            if y_a == y_b {
                PairRelation::Neighbor
            } else {
                PairRelation::NonNeighbor
            }
        }
        RelationSpace::E => {
            if e_a == e_b {
                PairRelation::Neighbor
            } else if y_a != y_b {
                PairRelation::NonNeighbor
            } else {
                PairRelation::Excluded
            }
        }
    }
}

/// Y-space pairwise loss: 1 - cos for neighbors, max(cos - m, 0) for
/// non-neighbors, 0 for excluded pairs.
pub fn loss_xy(f_a: ArrayView1<f64>, f_b: ArrayView1<f64>, rel: PairRelation, m: f64) -> f64 {
    let cos = cosine_similarity(f_a, f_b);
    match rel {
        PairRelation::Neighbor => 1.0 - cos,
        PairRelation::NonNeighbor => (cos - m).max(0.0),
        PairRelation::Excluded => 0.0,
    }
}

/// E-space pairwise loss; the functional form is identical to [`loss_xy`]
/// with the E-space relation and margin.
pub fn loss_xe(f_a: ArrayView1<f64>, f_b: ArrayView1<f64>, rel: PairRelation, m: f64) -> f64 {
    loss_xy(f_a, f_b, rel, m)
}

/// Combined loss: loss_xy + w * loss_xe.
pub fn loss_combined(
    f_a: ArrayView1<f64>,
    f_b: ArrayView1<f64>,
    rel_y: PairRelation,
    rel_e: PairRelation,
    params: &LossParams,
) -> f64 {
    loss_xy(f_a, f_b, rel_y, params.m1) + params.w * loss_xe(f_a, f_b, rel_e, params.m2)
}

/// dL/dcos for a single-space loss at the given relation.
fn loss_cos_coefficient(cos: f64, rel: PairRelation, m: f64) -> f64 {
    match rel {
        PairRelation::Neighbor => -1.0,
        // Clamp-boundary subgradient at cos == m is 0.
        PairRelation::NonNeighbor => {
            if cos > m {
                1.0
            } else {
                0.0
            }
        }
        PairRelation::Excluded => 0.0,
    }
}

/// Analytic gradient of the per-pair loss w.r.t. both embeddings.
pub fn pair_loss_grad(
    f_a: ArrayView1<f64>,
    f_b: ArrayView1<f64>,
    rel_y: PairRelation,
    rel_e: PairRelation,
    params: &LossParams,
    mode: PairMode,
) -> (f64, Array1<f64>, Array1<f64>) {
    let na = f_a.dot(&f_a).sqrt();
    let nb = f_b.dot(&f_b).sqrt();
    if na == 0.0 || nb == 0.0 {
        let loss = pair_loss_value(f_a, f_b, rel_y, rel_e, params, mode);
        return (loss, Array1::zeros(f_a.len()), Array1::zeros(f_b.len()));
    }
    let cos = (f_a.dot(&f_b) / (na * nb)).clamp(-1.0, 1.0);
    let coeff = match mode {
        PairMode::YOnly => loss_cos_coefficient(cos, rel_y, params.m1),
        PairMode::EOnly => loss_cos_coefficient(cos, rel_e, params.m2),
        PairMode::YAndE => {
            loss_cos_coefficient(cos, rel_y, params.m1)
                + params.w * loss_cos_coefficient(cos, rel_e, params.m2)
        }
    };
    let loss = pair_loss_value(f_a, f_b, rel_y, rel_e, params, mode);
    // dcos/da = b/(|a||b|) - cos * a/|a|^2, and symmetrically for b.
    let grad_a = f_b.mapv(|v| v / (na * nb)) - f_a.mapv(|v| cos * v / (na * na));
    let grad_b = f_a.mapv(|v| v / (na * nb)) - f_b.mapv(|v| cos * v / (nb * nb));
    (loss, grad_a.mapv(|v| coeff * v), grad_b.mapv(|v| coeff * v))
}

/// Per-pair loss under the selected mode.
pub fn pair_loss_value(
    f_a: ArrayView1<f64>,
    f_b: ArrayView1<f64>,
    rel_y: PairRelation,
    rel_e: PairRelation,
    params: &LossParams,
    mode: PairMode,
) -> f64 {
    match mode {
        PairMode::YOnly => loss_xy(f_a, f_b, rel_y, params.m1),
        PairMode::EOnly => loss_xe(f_a, f_b, rel_e, params.m2),
        PairMode::YAndE => loss_combined(f_a, f_b, rel_y, rel_e, params),
    }
}

/// One sampled ordered pair; indices point into the training-split row list.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PairSample {
    pub a: usize,
    pub b: usize,
    pub rel_y: PairRelation,
    pub rel_e: PairRelation,
}

/// A batch of sampled pairs with both relations precomputed.
#[derive(Debug, Clone, PartialEq)]
pub struct PairBatch {
    pub pairs: Vec<PairSample>,
    pub seed: u64,
}

impl PairBatch {
    /// One `a b rel_y rel_e` line per pair.
    pub fn to_text(&self) -> String {
        let mut s = format!("# pair batch seed={}\n", self.seed);
        for p in &self.pairs {
            s.push_str(&format!("{} {} {} {}\n", p.a, p.b, p.rel_y, p.rel_e));
        }
        s
    }

    pub fn from_text(text: &str) -> Result<PairBatch> {
        let mut seed = 0u64;
        let mut pairs = Vec::new();
        for line in text.lines() {
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            if let Some(rest) = line.strip_prefix('#') {
                if let Some(s) = rest.trim().strip_prefix("pair batch seed=") {
                    seed = s
                        .parse()
                        .map_err(|_| Error::InvalidValue("bad pair batch seed".into()))?;
                }
                continue;
            }
            let parts: Vec<&str> = line.split_whitespace().collect();
            if parts.len() != 4 {
                return Err(Error::InvalidValue(format!("bad pair line '{line}'")));
            }
            pairs.push(PairSample {
                a: parts[0]
                    .parse()
                    .map_err(|_| Error::InvalidValue("bad pair index".into()))?,
                b: parts[1]
                    .parse()
                    .map_err(|_| Error::InvalidValue("bad pair index".into()))?,
                rel_y: PairRelation::from_tag(parts[2])?,
                rel_e: PairRelation::from_tag(parts[3])?,
            });
        }
        Ok(PairBatch { pairs, seed })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_text()).map_err(|e| Error::io(path.display().to_string(), e))
    }
}

/// Both relations for a pair of training-split rows under the spec.
pub fn relations_for(
    labels: &Labels,
    explanations: &Explanations,
    a: usize,
    b: usize,
    spec: &NeighborSpec,
) -> Result<(PairRelation, PairRelation)> {
    match spec {
        NeighborSpec::Continuous { c1, c2, c3, c4 } => {
            let (ya, yb) = match labels {
                Labels::Continuous(v) => (Array1::from_vec(vec![v[a]]), Array1::from_vec(vec![v[b]])),
                Labels::Categorical { .. } => {
                    return Err(Error::InvalidValue(
                        "continuous neighbor spec needs continuous labels".into(),
                    ))
                }
            };
            let rel_y = relation_continuous(ya.view(), yb.view(), *c1, *c2)?;
            let rel_e = match explanations {
                Explanations::Continuous(m) => {
                    relation_continuous(m.row(a), m.row(b), *c3, *c4)?
                }
                Explanations::Categorical { .. } => {
                    return Err(Error::InvalidValue(
                        "continuous neighbor spec needs continuous explanations".into(),
                    ))
                }
            };
            Ok((rel_y, rel_e))
        }
        NeighborSpec::Categorical => {
            let (ya, yb) = match labels {
                Labels::Categorical { classes, .. } => (classes[a], classes[b]),
                Labels::Continuous(_) => {
                    return Err(Error::InvalidValue(
                        "categorical neighbor spec needs categorical labels".into(),
                    ))
                }
            };
            let (ea, eb) = match explanations {
                Explanations::Categorical { classes, .. } => (classes[a], classes[b]),
                Explanations::Continuous(_) => {
                    return Err(Error::InvalidValue(
                        "categorical neighbor spec needs categorical explanations".into(),
                    ))
                }
            };
            Ok((
                relation_categorical(ya, yb, ea, eb, RelationSpace::Y),
                relation_categorical(ya, yb, ea, eb, RelationSpace::E),
            ))
        }
    }
}

/// Draw cap multiplier before sampling gives up.
const SAMPLING_CAP_FACTOR: usize = 100;

/// Uniformly sample ordered pairs (a != b) from the training split, keeping
/// only pairs that can contribute to the selected loss mode; deterministic
/// given the seed.
pub fn sample_pairs(
    d: &Dataset,
    spec: &NeighborSpec,
    n_pairs: usize,
    seed: u64,
    mode: PairMode,
) -> Result<PairBatch> {
    spec.validate()?;
    let train_rows = d.rows_of(Split::Train);
    if train_rows.len() < 2 {
        return Err(Error::InvalidValue(
            "pair sampling needs at least 2 training samples".into(),
        ));
    }
    let labels = d.labels.select(&train_rows);
    let explanations = d.explanations.select(&train_rows);
    let n = train_rows.len();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut pairs = Vec::with_capacity(n_pairs);
    let cap = SAMPLING_CAP_FACTOR.saturating_mul(n_pairs);
    let mut draws = 0usize;
    while pairs.len() < n_pairs {
        if draws >= cap {
            return Err(Error::PairSamplingExhausted {
                retained: pairs.len(),
                requested: n_pairs,
                draws,
            });
        }
        draws += 1;
        let a = rng.gen_range(0..n);
        let b = rng.gen_range(0..n);
        if a == b {
            continue;
        }
        let (rel_y, rel_e) = relations_for(&labels, &explanations, a, b, spec)?;
        let informative = match mode {
            PairMode::YOnly => rel_y != PairRelation::Excluded,
            PairMode::EOnly => rel_e != PairRelation::Excluded,
            PairMode::YAndE => {
                rel_y != PairRelation::Excluded || rel_e != PairRelation::Excluded
            }
        };
        if !informative {
            continue;
        }
        pairs.push(PairSample { a, b, rel_y, rel_e });
    }
    Ok(PairBatch { pairs, seed })
}

/// Mean pairwise loss over `pairs` and its exact gradient w.r.t. every trunk
/// parameter. `x_train` rows align with the pair indices.
pub fn batch_loss_and_trunk_grads(
    net: &Network,
    x_train: &Array2<f64>,
    pairs: &[PairSample],
    params: &LossParams,
    mode: PairMode,
) -> Result<(f64, Vec<crate::network::LayerGrad>)> {
    let m = pairs.len();
    if m == 0 {
        return Err(Error::InvalidValue("empty pair batch".into()));
    }
    let mut xa = Array2::zeros((m, x_train.ncols()));
    let mut xb = Array2::zeros((m, x_train.ncols()));
    for (r, p) in pairs.iter().enumerate() {
        xa.row_mut(r).assign(&x_train.row(p.a));
        xb.row_mut(r).assign(&x_train.row(p.b));
    }
    let cache_a = net.trunk_forward(&xa)?;
    let cache_b = net.trunk_forward(&xb)?;
    let fa = cache_a.output();
    let fb = cache_b.output();
    let mut grad_a = Array2::zeros(fa.dim());
    let mut grad_b = Array2::zeros(fb.dim());
    let mut total = 0.0;
    let scale = 1.0 / m as f64;
    for (r, p) in pairs.iter().enumerate() {
        let (loss, ga, gb) = pair_loss_grad(fa.row(r), fb.row(r), p.rel_y, p.rel_e, params, mode);
        total += loss;
        grad_a.row_mut(r).assign(&ga.mapv(|v| v * scale));
        grad_b.row_mut(r).assign(&gb.mapv(|v| v * scale));
    }
    let mut grads = net.trunk_backward(&cache_a, &grad_a);
    let grads_b = net.trunk_backward(&cache_b, &grad_b);
    for (g, gb) in grads.iter_mut().zip(grads_b) {
        g.d_weights += &gb.d_weights;
        g.d_bias += &gb.d_bias;
    }
    Ok((total * scale, grads))
}

/// Minimize the mean pairwise loss over the batch by gradient descent through
/// the trunk; heads are untouched. `x_train` rows align with the pair indices.
pub fn train_pairwise(
    net: &Network,
    x_train: &Array2<f64>,
    pairs: &PairBatch,
    params: &LossParams,
    config: &TrainConfig,
    mode: PairMode,
) -> Result<(Network, Vec<f64>)> {
    params.validate()?;
    config.validate()?;
    if pairs.pairs.is_empty() {
        return Err(Error::InvalidValue("empty pair batch".into()));
    }
    if let Some(p) = pairs
        .pairs
        .iter()
        .find(|p| p.a >= x_train.nrows() || p.b >= x_train.nrows())
    {
        return Err(Error::InvalidValue(format!(
            "pair ({}, {}) out of range for {} training rows",
            p.a,
            p.b,
            x_train.nrows()
        )));
    }
    let mut net = net.clone();
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let lr = config.trunk_learning_rate.unwrap_or(config.learning_rate);
    let n = pairs.pairs.len();
    let mut trajectory = Vec::with_capacity(config.epochs);
    for epoch in 0..config.epochs {
        let order = crate::network::shuffled_indices(n, &mut rng);
        let mut epoch_loss = 0.0;
        let mut batches = 0usize;
        for chunk in order.chunks(config.batch_size.min(n)) {
            let batch: Vec<PairSample> = chunk.iter().map(|&pi| pairs.pairs[pi]).collect();
            let (batch_loss, grads) =
                batch_loss_and_trunk_grads(&net, x_train, &batch, params, mode)?;
            if !batch_loss.is_finite() {
                return Err(Error::NonFiniteLoss {
                    epoch,
                    loss: batch_loss,
                });
            }
            net.apply_trunk_grads(&grads, lr);
            epoch_loss += batch_loss;
            batches += 1;
        }
        trajectory.push(epoch_loss / batches as f64);
    }
    Ok((net, trajectory))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset;
    use crate::network::{Activation, Network};
    use crate::oracle;
    use approx::assert_abs_diff_eq;
    use ndarray::array;
    use proptest::prelude::*;
    use rand::Rng;

    #[test]
    fn cosine_basic_values() {
        let a = array![1.0, 2.0, 3.0];
        assert_abs_diff_eq!(cosine_similarity(a.view(), a.view()), 1.0, epsilon = 1e-12);
        let x = array![1.0, 0.0];
        let y = array![0.0, 5.0];
        assert_abs_diff_eq!(cosine_similarity(x.view(), y.view()), 0.0);
        let neg = a.mapv(|v| -v);
        assert_abs_diff_eq!(cosine_similarity(a.view(), neg.view()), -1.0, epsilon = 1e-12);
    }

    #[test]
    fn cosine_zero_norm_is_flagged_zero() {
        let z = array![0.0, 0.0];
        let a = array![1.0, 1.0];
        let (v, flagged) = cosine_similarity_flagged(z.view(), a.view());
        assert_eq!(v, 0.0);
        assert!(flagged);
    }

    #[test]
    fn relation_continuous_thresholds() {
        let a = array![5.0];
        assert_eq!(
            relation_continuous(a.view(), a.view(), 0.0, 0.0).unwrap(),
            PairRelation::Neighbor
        );
        // olfactory Y-space buffer: d = 15 with (10, 20) is excluded
        let y0 = array![0.0];
        let y15 = array![15.0];
        assert_eq!(
            relation_continuous(y0.view(), y15.view(), 10.0, 20.0).unwrap(),
            PairRelation::Excluded
        );
        // olfactory E-space: d = 0.03 with (0.0272, 0.0272) is a non-neighbor
        let e0 = array![0.0];
        let e1 = array![0.03];
        assert_eq!(
            relation_continuous(e0.view(), e1.view(), 0.0272, 0.0272).unwrap(),
            PairRelation::NonNeighbor
        );
    }

    #[test]
    fn relation_categorical_rules() {
        use RelationSpace::*;
        assert_eq!(relation_categorical(0, 0, 1, 1, E), PairRelation::Neighbor);
        assert_eq!(relation_categorical(0, 0, 1, 2, E), PairRelation::Excluded);
        assert_eq!(relation_categorical(0, 1, 1, 2, E), PairRelation::NonNeighbor);
        assert_eq!(relation_categorical(0, 0, 1, 2, Y), PairRelation::Neighbor);
        assert_eq!(relation_categorical(0, 1, 1, 1, Y), PairRelation::NonNeighbor);
    }

    #[test]
    fn loss_values_at_identical_embeddings() {
        let f = array![0.3, -0.4, 1.0];
        assert_abs_diff_eq!(loss_xy(f.view(), f.view(), PairRelation::Neighbor, 0.25), 0.0);
        assert_abs_diff_eq!(
            loss_xy(f.view(), f.view(), PairRelation::NonNeighbor, 0.25),
            0.75,
            epsilon = 1e-12
        );
        assert_abs_diff_eq!(loss_xy(f.view(), f.view(), PairRelation::Excluded, 0.25), 0.0);
    }

    #[test]
    fn non_neighbor_clamp_below_margin() {
        // cos = 0.1 < m = 0.25 -> 0
        let a = array![1.0, 0.0];
        let theta = 0.1f64.acos();
        let b = array![theta.cos(), theta.sin()];
        assert_abs_diff_eq!(
            loss_xy(a.view(), b.view(), PairRelation::NonNeighbor, 0.25),
            0.0
        );
    }

    #[test]
    fn combined_loss_composition() {
        let a = array![1.0, 0.2];
        let b = array![0.4, 1.0];
        let p = LossParams {
            m1: 0.25,
            m2: 0.25,
            w: 0.0,
        };
        assert_abs_diff_eq!(
            loss_combined(a.view(), b.view(), PairRelation::Neighbor, PairRelation::NonNeighbor, &p),
            loss_xy(a.view(), b.view(), PairRelation::Neighbor, 0.25)
        );
        let p1 = LossParams { w: 1.0, ..p };
        assert_abs_diff_eq!(
            loss_combined(a.view(), b.view(), PairRelation::Neighbor, PairRelation::NonNeighbor, &p1),
            loss_xy(a.view(), b.view(), PairRelation::Neighbor, 0.25)
                + loss_xe(a.view(), b.view(), PairRelation::NonNeighbor, 0.25)
        );
    }

    proptest! {
        #[test]
        fn losses_nonnegative_symmetric_scale_invariant(
            a in proptest::collection::vec(-5.0f64..5.0, 4),
            b in proptest::collection::vec(-5.0f64..5.0, 4),
            scale in 0.1f64..10.0,
            m in 0.0f64..1.0,
        ) {
            let fa = Array1::from_vec(a);
            let fb = Array1::from_vec(b);
            for rel in [PairRelation::Neighbor, PairRelation::NonNeighbor, PairRelation::Excluded] {
                let l = loss_xy(fa.view(), fb.view(), rel, m);
                prop_assert!(l >= 0.0);
                let swapped = loss_xy(fb.view(), fa.view(), rel, m);
                prop_assert!((l - swapped).abs() < 1e-12);
                let scaled = loss_xy(fa.mapv(|v| v * scale).view(), fb.view(), rel, m);
                prop_assert!((l - scaled).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn pair_grad_matches_finite_differences() {
        let params = LossParams {
            m1: 0.25,
            m2: 0.5,
            w: 0.8,
        };
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        for case in 0..30 {
            let d = 3 + case % 4;
            let fa = Array1::from_shape_fn(d, |_| rng.gen_range(-2.0..2.0f64) + 0.1);
            let fb = Array1::from_shape_fn(d, |_| rng.gen_range(-2.0..2.0f64) + 0.1);
            let rel_y = if case % 2 == 0 {
                PairRelation::Neighbor
            } else {
                PairRelation::NonNeighbor
            };
            let rel_e = if case % 3 == 0 {
                PairRelation::NonNeighbor
            } else {
                PairRelation::Neighbor
            };
            let cos = cosine_similarity(fa.view(), fb.view());
            // keep clear of the clamp boundary where the subgradient is ambiguous
            if (cos - params.m1).abs() < 1e-3 || (cos - params.m2).abs() < 1e-3 {
                continue;
            }
            for mode in [PairMode::YOnly, PairMode::EOnly, PairMode::YAndE] {
                let (_, ga, gb) = pair_loss_grad(fa.view(), fb.view(), rel_y, rel_e, &params, mode);
                let mut flat: Vec<f64> = fa.iter().chain(fb.iter()).copied().collect();
                let numeric = oracle::finite_difference_grad(
                    |p| {
                        let pa = Array1::from_vec(p[..d].to_vec());
                        let pb = Array1::from_vec(p[d..].to_vec());
                        pair_loss_value(pa.view(), pb.view(), rel_y, rel_e, &params, mode)
                    },
                    &mut flat,
                    1e-6,
                );
                let analytic: Vec<f64> = ga.iter().chain(gb.iter()).copied().collect();
                let err = oracle::max_relative_error(&analytic, &numeric);
                assert!(err < 1e-4, "case {case} mode {mode:?} err {err}");
            }
        }
    }

    fn two_class_dataset() -> Dataset {
        // 4 samples, labels split 0/1, explanations follow labels
        Dataset::new(
            array![[0.0, 1.0], [0.1, 0.9], [1.0, 0.0], [0.9, 0.1]],
            dataset::Labels::Continuous(array![0.0, 0.0, 10.0, 10.0]),
            dataset::Explanations::Continuous(array![[0.0], [0.0], [5.0], [5.0]]),
            vec![Split::Train; 4],
            vec![],
            vec![],
        )
        .unwrap()
    }

    #[test]
    fn sample_pairs_is_deterministic_and_respects_spec() {
        let d = two_class_dataset();
        let spec = NeighborSpec::Continuous {
            c1: 1.0,
            c2: 1.0,
            c3: 1.0,
            c4: 1.0,
        };
        let a = sample_pairs(&d, &spec, 50, 5, PairMode::YAndE).unwrap();
        let b = sample_pairs(&d, &spec, 50, 5, PairMode::YAndE).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.pairs.len(), 50);
        assert!(a.pairs.iter().all(|p| p.a != p.b));
    }

    #[test]
    fn sample_pairs_all_neighbors_for_identical_labels() {
        let d = Dataset::new(
            array![[0.0], [1.0]],
            dataset::Labels::Continuous(array![3.0, 3.0]),
            dataset::Explanations::Continuous(array![[0.0], [0.0]]),
            vec![Split::Train; 2],
            vec![],
            vec![],
        )
        .unwrap();
        let spec = NeighborSpec::Continuous {
            c1: 0.5,
            c2: 0.5,
            c3: 0.5,
            c4: 0.5,
        };
        let batch = sample_pairs(&d, &spec, 10, 1, PairMode::YOnly).unwrap();
        assert!(batch.pairs.iter().all(|p| p.rel_y == PairRelation::Neighbor));
    }

    #[test]
    fn sample_pairs_degenerate_spec_errors() {
        // two samples with |y_a - y_b| = 10 inside the (5, 15] buffer: every
        // pair is excluded, so the draw cap must trip
        let d = Dataset::new(
            array![[0.0], [1.0]],
            dataset::Labels::Continuous(array![0.0, 10.0]),
            dataset::Explanations::Continuous(array![[0.0], [0.0]]),
            vec![Split::Train; 2],
            vec![],
            vec![],
        )
        .unwrap();
        let spec = NeighborSpec::Continuous {
            c1: 5.0,
            c2: 15.0,
            c3: 1.0,
            c4: 1.0,
        };
        assert!(matches!(
            sample_pairs(&d, &spec, 10, 1, PairMode::YOnly),
            Err(Error::PairSamplingExhausted { .. })
        ));
    }

    #[test]
    fn pair_batch_text_round_trip() {
        let d = two_class_dataset();
        let spec = NeighborSpec::Continuous {
            c1: 1.0,
            c2: 2.0,
            c3: 1.0,
            c4: 1.0,
        };
        let batch = sample_pairs(&d, &spec, 20, 9, PairMode::YAndE).unwrap();
        let text = batch.to_text();
        let back = PairBatch::from_text(&text).unwrap();
        assert_eq!(batch, back);
    }

    #[test]
    fn train_pairwise_aligns_neighbor_pair() {
        // two points, one neighbor pair, 1-layer trunk: cosine should reach ~1
        let x = array![[1.0, 0.0], [0.0, 1.0]];
        let pairs = PairBatch {
            pairs: vec![PairSample {
                a: 0,
                b: 1,
                rel_y: PairRelation::Neighbor,
                rel_e: PairRelation::Neighbor,
            }],
            seed: 0,
        };
        let net = Network::dense(&[2, 2], &[1], None, Activation::Identity, 12).unwrap();
        let params = LossParams {
            m1: 0.25,
            m2: 0.25,
            w: 1.0,
        };
        let config = TrainConfig {
            epochs: 4000,
            batch_size: 1,
            learning_rate: 0.05,
            ..TrainConfig::default()
        };
        let (trained, traj) =
            train_pairwise(&net, &x, &pairs, &params, &config, PairMode::YOnly).unwrap();
        let emb = trained.embed(&x).unwrap();
        let cos = cosine_similarity(emb.row(0), emb.row(1));
        assert!(cos >= 0.999, "cos {cos}, final loss {}", traj.last().unwrap());
    }

    #[test]
    fn y_only_equals_combined_with_zero_weight() {
        let d = two_class_dataset();
        let spec = NeighborSpec::Continuous {
            c1: 1.0,
            c2: 1.0,
            c3: 1.0,
            c4: 1.0,
        };
        let pairs = sample_pairs(&d, &spec, 30, 3, PairMode::YOnly).unwrap();
        let net = Network::dense(&[2, 3], &[1], None, Activation::Identity, 5).unwrap();
        let config = TrainConfig {
            epochs: 20,
            batch_size: 8,
            learning_rate: 0.01,
            ..TrainConfig::default()
        };
        let params0 = LossParams {
            m1: 0.25,
            m2: 0.25,
            w: 0.0,
        };
        let (a, _) =
            train_pairwise(&net, &d.features, &pairs, &params0, &config, PairMode::YOnly).unwrap();
        let (b, _) =
            train_pairwise(&net, &d.features, &pairs, &params0, &config, PairMode::YAndE).unwrap();
        assert_eq!(a.params_flat(), b.params_flat());
    }

    #[test]
    fn zero_learning_rate_leaves_net_unchanged() {
        let d = two_class_dataset();
        let spec = NeighborSpec::Continuous {
            c1: 1.0,
            c2: 1.0,
            c3: 1.0,
            c4: 1.0,
        };
        let pairs = sample_pairs(&d, &spec, 10, 3, PairMode::YOnly).unwrap();
        let net = Network::dense(&[2, 3], &[1], None, Activation::Identity, 5).unwrap();
        let config = TrainConfig {
            epochs: 5,
            batch_size: 4,
            learning_rate: 0.0,
            ..TrainConfig::default()
        };
        let params = LossParams {
            m1: 0.25,
            m2: 0.25,
            w: 1.0,
        };
        let (trained, _) =
            train_pairwise(&net, &d.features, &pairs, &params, &config, PairMode::YOnly).unwrap();
        assert_eq!(trained.params_flat(), net.params_flat());
    }
}
