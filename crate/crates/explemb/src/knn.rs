//! Exact embedding-space k-nearest-neighbor inference with Gaussian kernel
//! weighting. The index is a brute-force structure: queries scan every stored
//! row, so results are exact by construction.

use std::fmt::Write as _;
use std::path::Path;

use ndarray::{Array1, Array2, ArrayView1};

use crate::dataset::{Explanations, Labels};
use crate::error::{Error, Result};
use crate::pairloss::cosine_similarity;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Metric {
    /// 1 - cos(a, b); suits embeddings trained with cosine losses.
    Cosine,
    Euclidean,
}

impl Metric {
    pub fn distance(&self, a: ArrayView1<f64>, b: ArrayView1<f64>) -> f64 {
        match self {
            Metric::Cosine => 1.0 - cosine_similarity(a, b),
            Metric::Euclidean => a
                .iter()
                .zip(b.iter())
                .map(|(x, y)| (x - y) * (x - y))
                .sum::<f64>()
                .sqrt(),
        }
    }

    pub fn tag(&self) -> &'static str {
        match self {
            Metric::Cosine => "cosine",
            Metric::Euclidean => "euclidean",
        }
    }

    pub fn from_tag(tag: &str) -> Result<Metric> {
        match tag {
            "cosine" => Ok(Metric::Cosine),
            "euclidean" => Ok(Metric::Euclidean),
            other => Err(Error::InvalidValue(format!("unknown metric '{other}'"))),
        }
    }
}

/// How the Gaussian bandwidth is chosen per query.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum BandwidthPolicy {
    /// sigma = median of the k retrieved distances, floored at 1e-12.
    MedianDistance,
    Fixed(f64),
}

impl BandwidthPolicy {
    fn bandwidth(&self, sorted_distances: &[f64]) -> f64 {
        match self {
            BandwidthPolicy::Fixed(s) => *s,
            BandwidthPolicy::MedianDistance => {
                let k = sorted_distances.len();
                let median = if k % 2 == 1 {
                    sorted_distances[k / 2]
                } else {
                    0.5 * (sorted_distances[k / 2 - 1] + sorted_distances[k / 2])
                };
                median.max(1e-12)
            }
        }
    }
}

/// Stored training embeddings plus their Y and E values.
#[derive(Debug, Clone)]
pub struct NeighborIndex {
    pub embeddings: Array2<f64>,
    pub y_values: Labels,
    pub e_values: Explanations,
    pub metric: Metric,
    pub bandwidth: BandwidthPolicy,
}

/// Result of one query: indices with ascending distances and normalized
/// Gaussian weights.
#[derive(Debug, Clone, PartialEq)]
pub struct Neighborhood {
    pub indices: Vec<usize>,
    pub distances: Vec<f64>,
    pub weights: Vec<f64>,
}

pub fn build_index(
    embeddings: Array2<f64>,
    y_values: Labels,
    e_values: Explanations,
    metric: Metric,
    bandwidth: BandwidthPolicy,
) -> Result<NeighborIndex> {
    let n = embeddings.nrows();
    if n == 0 {
        return Err(Error::EmptyDataset);
    }
    if embeddings.ncols() == 0 {
        return Err(Error::InvalidValue("embedding width must be > 0".into()));
    }
    if y_values.len() != n || e_values.len() != n {
        return Err(Error::ShapeMismatch(format!(
            "index rows {} / y {} / e {}",
            n,
            y_values.len(),
            e_values.len()
        )));
    }
    if let BandwidthPolicy::Fixed(s) = bandwidth {
        if s <= 0.0 {
            return Err(Error::InvalidValue("bandwidth must be positive".into()));
        }
    }
    Ok(NeighborIndex {
        embeddings,
        y_values,
        e_values,
        metric,
        bandwidth,
    })
}

/// Normalized Gaussian weights w_i proportional to exp(-d_i^2 / (2 sigma^2));
/// uniform fallback when every raw weight underflows to zero.
pub fn gaussian_weights(distances: &[f64], bandwidth: f64) -> Result<Vec<f64>> {
    if bandwidth <= 0.0 {
        return Err(Error::InvalidValue("bandwidth must be positive".into()));
    }
    let raw: Vec<f64> = distances
        .iter()
        .map(|&d| (-d * d / (2.0 * bandwidth * bandwidth)).exp())
        .collect();
    let sum: f64 = raw.iter().sum();
    if sum == 0.0 {
        let k = distances.len() as f64;
        return Ok(vec![1.0 / k; distances.len()]);
    }
    Ok(raw.into_iter().map(|w| w / sum).collect())
}

impl NeighborIndex {
    pub fn len(&self) -> usize {
        self.embeddings.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Exact k smallest distances (ties broken by lower training-row index),
    /// with Gaussian weights; k is capped at the index size.
    pub fn query(&self, f: ArrayView1<f64>, k: usize) -> Result<Neighborhood> {
        if k == 0 {
            return Err(Error::InvalidValue("k must be >= 1".into()));
        }
        if f.len() != self.embeddings.ncols() {
            return Err(Error::ShapeMismatch(format!(
                "query width {} vs index width {}",
                f.len(),
                self.embeddings.ncols()
            )));
        }
        let mut scored: Vec<(usize, f64)> = self
            .embeddings
            .rows()
            .into_iter()
            .enumerate()
            .map(|(i, row)| (i, self.metric.distance(f, row)))
            .collect();
        scored.sort_by(|a, b| {
            a.1.partial_cmp(&b.1)
                .unwrap_or(std::cmp::Ordering::Equal)
                .then(a.0.cmp(&b.0))
        });
        scored.truncate(k.min(self.len()));
        let indices: Vec<usize> = scored.iter().map(|&(i, _)| i).collect();
        let distances: Vec<f64> = scored.iter().map(|&(_, d)| d).collect();
        let sigma = self.bandwidth.bandwidth(&distances);
        let weights = gaussian_weights(&distances, sigma)?;
        Ok(Neighborhood {
            indices,
            distances,
            weights,
        })
    }

    /// Serialize alongside a model checkpoint (embeddings + values + tags;
    /// f64 cells as hex bit patterns for exact round trips).
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let (n, d) = self.embeddings.dim();
        let bw = match self.bandwidth {
            BandwidthPolicy::MedianDistance => "median".to_string(),
            BandwidthPolicy::Fixed(v) => format!("fixed:{:016x}", v.to_bits()),
        };
        let _ = writeln!(s, "explemb-index v1 n={} d={} metric={} bandwidth={}", n, d, self.metric.tag(), bw);
        for row in self.embeddings.rows() {
            let cells: Vec<String> = row.iter().map(|v| format!("{:016x}", v.to_bits())).collect();
            let _ = writeln!(s, "{}", cells.join(" "));
        }
        match &self.y_values {
            Labels::Continuous(v) => {
                let cells: Vec<String> = v.iter().map(|x| format!("{:016x}", x.to_bits())).collect();
                let _ = writeln!(s, "y continuous {}", cells.join(" "));
            }
            Labels::Categorical { classes, n_classes } => {
                let cells: Vec<String> = classes.iter().map(|c| c.to_string()).collect();
                let _ = writeln!(s, "y categorical {} {}", n_classes, cells.join(" "));
            }
        }
        match &self.e_values {
            Explanations::Continuous(m) => {
                let _ = writeln!(s, "e continuous {}", m.ncols());
                for row in m.rows() {
                    let cells: Vec<String> =
                        row.iter().map(|v| format!("{:016x}", v.to_bits())).collect();
                    let _ = writeln!(s, "{}", cells.join(" "));
                }
            }
            Explanations::Categorical { classes, n_classes } => {
                let cells: Vec<String> = classes.iter().map(|c| c.to_string()).collect();
                let _ = writeln!(s, "e categorical {} {}", n_classes, cells.join(" "));
            }
        }
        s
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_text()).map_err(|e| Error::io(path.display().to_string(), e))
    }
}

/// Weighted average of stored continuous values over the neighborhood.
pub fn predict_continuous(nbhd: &Neighborhood, values: &Array2<f64>) -> Result<Array1<f64>> {
    if let Some(&i) = nbhd.indices.iter().find(|&&i| i >= values.nrows()) {
        return Err(Error::ShapeMismatch(format!(
            "neighbor index {} out of range for {} value rows",
            i,
            values.nrows()
        )));
    }
    let mut out = Array1::zeros(values.ncols());
    for (&i, &w) in nbhd.indices.iter().zip(&nbhd.weights) {
        out.scaled_add(w, &values.row(i));
    }
    Ok(out)
}

/// Class with the maximum summed weight; ties break toward the lower class
/// index. Set `majority` to ignore the kernel weights and count plain votes.
pub fn predict_categorical(
    nbhd: &Neighborhood,
    classes: &[usize],
    n_classes: usize,
    majority: bool,
) -> Result<usize> {
    if let Some(&i) = nbhd.indices.iter().find(|&&i| i >= classes.len()) {
        return Err(Error::ShapeMismatch(format!(
            "neighbor index {} out of range for {} classes",
            i,
            classes.len()
        )));
    }
    let mut votes = vec![0.0f64; n_classes];
    for (&i, &w) in nbhd.indices.iter().zip(&nbhd.weights) {
        votes[classes[i]] += if majority { 1.0 } else { w };
    }
    let mut best = 0usize;
    for (c, &v) in votes.iter().enumerate() {
        if v > votes[best] {
            best = c;
        }
    }
    Ok(best)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracle;
    use approx::assert_abs_diff_eq;
    use ndarray::array;
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn index_from(embeddings: Array2<f64>, metric: Metric) -> NeighborIndex {
        let n = embeddings.nrows();
        build_index(
            embeddings,
            Labels::Continuous(Array1::from_iter((0..n).map(|i| i as f64))),
            Explanations::Continuous(Array2::zeros((n, 1))),
            metric,
            BandwidthPolicy::MedianDistance,
        )
        .unwrap()
    }

    #[test]
    fn exact_hit_has_zero_distance_and_unit_weight() {
        let idx = index_from(array![[1.0, 0.0], [0.0, 1.0]], Metric::Euclidean);
        let nbhd = idx.query(array![1.0, 0.0].view(), 1).unwrap();
        assert_eq!(nbhd.indices, vec![0]);
        assert_abs_diff_eq!(nbhd.distances[0], 0.0);
        assert_abs_diff_eq!(nbhd.weights[0], 1.0);
    }

    #[test]
    fn k_capped_at_index_size_and_sorted() {
        let idx = index_from(array![[3.0], [1.0], [2.0]], Metric::Euclidean);
        let nbhd = idx.query(array![0.0].view(), 10).unwrap();
        assert_eq!(nbhd.indices, vec![1, 2, 0]);
        assert!(nbhd.distances.windows(2).all(|w| w[0] <= w[1]));
    }

    #[test]
    fn single_row_index_answers_every_query() {
        let idx = index_from(array![[0.5, 0.5]], Metric::Cosine);
        let nbhd = idx.query(array![-3.0, 9.0].view(), 4).unwrap();
        assert_eq!(nbhd.indices, vec![0]);
        assert_abs_diff_eq!(nbhd.weights[0], 1.0);
    }

    #[test]
    fn build_index_rejects_misaligned_rows() {
        let r = build_index(
            Array2::zeros((3, 2)),
            Labels::Continuous(array![1.0, 2.0]),
            Explanations::Continuous(Array2::zeros((3, 1))),
            Metric::Euclidean,
            BandwidthPolicy::MedianDistance,
        );
        assert!(r.is_err());
    }

    #[test]
    fn matches_exhaustive_oracle_on_seeded_cases() {
        let mut rng = ChaCha8Rng::seed_from_u64(77);
        for case in 0..50 {
            let n = 10 + (case * 7) % 41;
            let d = 1 + case % 8;
            let points = Array2::from_shape_fn((n, d), |_| rng.gen_range(-1.0..1.0));
            let query: Vec<f64> = (0..d).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let k = 1 + case % 7;
            for metric in [Metric::Euclidean, Metric::Cosine] {
                let idx = index_from(points.clone(), metric);
                let nbhd = idx.query(Array1::from_vec(query.clone()).view(), k).unwrap();
                let (oi, od) = oracle::knn_exhaustive(&points, &query, k, metric.tag());
                assert_eq!(nbhd.indices, oi, "case {case} metric {metric:?}");
                for (a, b) in nbhd.distances.iter().zip(&od) {
                    assert_abs_diff_eq!(a, b, epsilon = 1e-12);
                }
            }
        }
    }

    #[test]
    fn gaussian_weight_properties() {
        // equal distances -> uniform
        let w = gaussian_weights(&[2.0, 2.0, 2.0], 1.0).unwrap();
        for v in &w {
            assert_abs_diff_eq!(v, &(1.0 / 3.0), epsilon = 1e-12);
        }
        // distances (1, 2), sigma 1 -> normalized (e^-0.5, e^-2)
        let w = gaussian_weights(&[1.0, 2.0], 1.0).unwrap();
        assert_abs_diff_eq!(w[0], 0.8176, epsilon = 1e-4);
        assert_abs_diff_eq!(w[1], 0.1824, epsilon = 1e-4);
        // far second point gets vanishing weight
        let w = gaussian_weights(&[0.0, 50.0], 1.0).unwrap();
        assert!(w[0] > 1.0 - 1e-12 && w[1] < 1e-12);
        // underflow fallback
        let w = gaussian_weights(&[1e6, 1e6], 1e-3).unwrap();
        assert_abs_diff_eq!(w[0], 0.5);
        assert!(gaussian_weights(&[1.0], 0.0).is_err());
    }

    #[test]
    fn weights_normalized_and_monotone() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        for _ in 0..100 {
            let k = 1 + rng.gen_range(0..10);
            let mut distances: Vec<f64> = (0..k).map(|_| rng.gen_range(0.0..5.0)).collect();
            distances.sort_by(|a, b| a.partial_cmp(b).unwrap());
            let w = gaussian_weights(&distances, rng.gen_range(0.01..2.0)).unwrap();
            let sum: f64 = w.iter().sum();
            assert_abs_diff_eq!(sum, 1.0, epsilon = 1e-12);
            assert!(w.windows(2).all(|p| p[0] >= p[1] - 1e-15));
        }
    }

    #[test]
    fn continuous_prediction_is_weighted_average() {
        let values = array![[10.0], [20.0]];
        let nbhd = Neighborhood {
            indices: vec![0, 1],
            distances: vec![1.0, 2.0],
            weights: vec![0.8176, 0.1824],
        };
        let p = predict_continuous(&nbhd, &values).unwrap();
        assert_abs_diff_eq!(p[0], 11.824, epsilon = 1e-3);
        // k = 1 returns the neighbor's value exactly
        let one = Neighborhood {
            indices: vec![1],
            distances: vec![0.0],
            weights: vec![1.0],
        };
        assert_abs_diff_eq!(predict_continuous(&one, &values).unwrap()[0], 20.0);
        // equal weights average
        let eq = Neighborhood {
            indices: vec![0, 1],
            distances: vec![1.0, 1.0],
            weights: vec![0.5, 0.5],
        };
        let values2 = array![[0.0], [100.0]];
        assert_abs_diff_eq!(predict_continuous(&eq, &values2).unwrap()[0], 50.0);
    }

    #[test]
    fn continuous_prediction_permutation_invariant() {
        let values = array![[1.0], [5.0], [9.0]];
        let a = Neighborhood {
            indices: vec![0, 1, 2],
            distances: vec![0.1, 0.2, 0.3],
            weights: vec![0.5, 0.3, 0.2],
        };
        let b = Neighborhood {
            indices: vec![2, 0, 1],
            distances: vec![0.3, 0.1, 0.2],
            weights: vec![0.2, 0.5, 0.3],
        };
        let pa = predict_continuous(&a, &values).unwrap();
        let pb = predict_continuous(&b, &values).unwrap();
        assert_abs_diff_eq!(pa[0], pb[0], epsilon = 1e-12);
    }

    #[test]
    fn categorical_prediction_votes() {
        let nbhd = Neighborhood {
            indices: vec![0, 1],
            distances: vec![0.0, 1.0],
            weights: vec![0.6, 0.4],
        };
        assert_eq!(predict_categorical(&nbhd, &[2, 0], 3, false).unwrap(), 2);
        let three = Neighborhood {
            indices: vec![0, 1, 2],
            distances: vec![0.0, 0.5, 0.5],
            weights: vec![0.4, 0.3, 0.3],
        };
        assert_eq!(predict_categorical(&three, &[1, 0, 0], 2, false).unwrap(), 0);
        // k = 1 returns the neighbor's class
        let one = Neighborhood {
            indices: vec![1],
            distances: vec![0.0],
            weights: vec![1.0],
        };
        assert_eq!(predict_categorical(&one, &[2, 1], 3, false).unwrap(), 1);
        // tie at equal vote weight resolves to the lower class index
        let tie = Neighborhood {
            indices: vec![0, 1],
            distances: vec![0.0, 0.0],
            weights: vec![0.5, 0.5],
        };
        assert_eq!(predict_categorical(&tie, &[3, 1], 4, false).unwrap(), 1);
    }

    #[test]
    fn index_text_round_trip_header() {
        let idx = index_from(array![[1.0, 2.0], [3.0, 4.0]], Metric::Cosine);
        let text = idx.to_text();
        assert!(text.starts_with("explemb-index v1 n=2 d=2 metric=cosine"));
    }
}
