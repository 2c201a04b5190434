//! Independent brute-force reference implementations used by tests and the
//! `gradcheck` subcommand. The arithmetic here is deliberately duplicated and
//! shares no code with the modules it checks.

use ndarray::{Array1, Array2};

/// Tolerances shared by the verification suites.
#[derive(Debug, Clone, Copy)]
pub struct OracleTolerance {
    pub relative_gradient: f64,
    pub absolute_prediction: f64,
    pub finite_difference_step: f64,
}

impl Default for OracleTolerance {
    fn default() -> Self {
        OracleTolerance {
            relative_gradient: 1e-4,
            absolute_prediction: 1e-9,
            finite_difference_step: 1e-5,
        }
    }
}

/// Exhaustive k-nearest-neighbor scan: full sort of all distances, ties broken
/// by lower row index. `metric` is "euclidean" or "cosine" (1 - cos).
pub fn knn_exhaustive(
    points: &Array2<f64>,
    query: &[f64],
    k: usize,
    metric: &str,
) -> (Vec<usize>, Vec<f64>) {
    assert_eq!(points.ncols(), query.len(), "dimension mismatch");
    let mut scored: Vec<(usize, f64)> = points
        .rows()
        .into_iter()
        .enumerate()
        .map(|(i, row)| {
            let d = match metric {
                "euclidean" => row
                    .iter()
                    .zip(query)
                    .map(|(a, b)| (a - b) * (a - b))
                    .sum::<f64>()
                    .sqrt(),
                "cosine" => {
                    let dot: f64 = row.iter().zip(query).map(|(a, b)| a * b).sum();
                    let na: f64 = row.iter().map(|v| v * v).sum::<f64>().sqrt();
                    let nb: f64 = query.iter().map(|v| v * v).sum::<f64>().sqrt();
                    if na == 0.0 || nb == 0.0 {
                        1.0
                    } else {
                        1.0 - (dot / (na * nb)).clamp(-1.0, 1.0)
                    }
                }
                other => panic!("unknown metric {other}"),
            };
            (i, d)
        })
        .collect();
    scored.sort_by(|a, b| a.1.partial_cmp(&b.1).unwrap().then(a.0.cmp(&b.0)));
    scored.truncate(k.min(points.nrows()));
    let indices = scored.iter().map(|&(i, _)| i).collect();
    let distances = scored.iter().map(|&(_, d)| d).collect();
    (indices, distances)
}

/// Central finite differences of `f` at `params`, one coordinate at a time.
pub fn finite_difference_grad<F>(mut f: F, params: &[f64], step: f64) -> Vec<f64>
where
    F: FnMut(&[f64]) -> f64,
{
    let mut grad = Vec::with_capacity(params.len());
    let mut p = params.to_vec();
    for i in 0..p.len() {
        let orig = p[i];
        p[i] = orig + step;
        let up = f(&p);
        p[i] = orig - step;
        let down = f(&p);
        p[i] = orig;
        assert!(up.is_finite() && down.is_finite(), "non-finite evaluation");
        grad.push((up - down) / (2.0 * step));
    }
    grad
}

/// max_i |a_i - b_i| / max(1, |a_i|, |b_i|).
pub fn max_relative_error(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).abs() / x.abs().max(y.abs()).max(1.0))
        .fold(0.0, f64::max)
}

/// Normal-equation least squares, with 1e-9 ridge when X^T X is singular.
pub fn least_squares_closed_form(x: &Array2<f64>, y: &Array1<f64>) -> Array1<f64> {
    assert_eq!(x.nrows(), y.len());
    let xtx = x.t().dot(x);
    let xty = x.t().dot(y);
    let d = xtx.nrows();
    let solve = |a: &Array2<f64>, b: &Array1<f64>| -> Option<Array1<f64>> {
        // Gaussian elimination with partial pivoting.
        let mut m = a.clone();
        let mut rhs = b.clone();
        for col in 0..d {
            let pivot = (col..d)
                .max_by(|&i, &j| m[[i, col]].abs().partial_cmp(&m[[j, col]].abs()).unwrap())?;
            if m[[pivot, col]].abs() < 1e-12 {
                return None;
            }
            if pivot != col {
                for j in 0..d {
                    m.swap([pivot, j], [col, j]);
                }
                rhs.swap(pivot, col);
            }
            for row in (col + 1)..d {
                let factor = m[[row, col]] / m[[col, col]];
                for j in col..d {
                    m[[row, j]] -= factor * m[[col, j]];
                }
                rhs[row] -= factor * rhs[col];
            }
        }
        let mut w = Array1::zeros(d);
        for row in (0..d).rev() {
            let mut acc = rhs[row];
            for j in (row + 1)..d {
                acc -= m[[row, j]] * w[j];
            }
            w[row] = acc / m[[row, row]];
        }
        Some(w)
    };
    if let Some(w) = solve(&xtx, &xty) {
        return w;
    }
    let ridged = &xtx + &(Array2::<f64>::eye(d) * 1e-9);
    solve(&ridged, &xty).expect("ridged system is nonsingular")
}
