//! Gaussian-kernel one-versus-all classifier over reduced feature
//! vectors.
//!
//! The head is kernel regularized least squares: solve
//! `(G + λI)·W = Y` for the one-hot label matrix `Y` and predict by the
//! argmax kernel score. Deterministic and closed-form; it stands behind a
//! single training interface so a margin-based solver could be swapped in
//! without touching callers.

use std::io::{Read, Write};
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// `exp(-‖u - v‖² / (2σ²))`.
pub fn gaussian_kernel(u: &[f64], v: &[f64], sigma: f64) -> Result<f64> {
    if sigma <= 0.0 {
        return Err(Error::NonPositiveBandwidth(sigma));
    }
    if u.len() != v.len() {
        return Err(Error::FeatureLengthMismatch {
            got: v.len(),
            expected: u.len(),
        });
    }
    let sq: f64 = u.iter().zip(v).map(|(a, b)| (a - b) * (a - b)).sum();
    Ok((-sq / (2.0 * sigma * sigma)).exp())
}

/// Median pairwise distance over a subsample of at most `cap` rows; the
/// usual bandwidth heuristic. Falls back to 1.0 when every distance is
/// zero.
pub fn median_distance(rows: &[Vec<f64>], cap: usize) -> f64 {
    let n = rows.len().min(cap);
    let mut distances: Vec<f64> = Vec::with_capacity(n * (n - 1) / 2);
    for i in 0..n {
        for j in (i + 1)..n {
            let sq: f64 = rows[i]
                .iter()
                .zip(&rows[j])
                .map(|(a, b)| (a - b) * (a - b))
                .sum();
            distances.push(sq.sqrt());
        }
    }
    if distances.is_empty() {
        return 1.0;
    }
    distances.sort_by(|a, b| a.partial_cmp(b).expect("finite distances"));
    let median = distances[distances.len() / 2];
    if median > 0.0 {
        median
    } else {
        1.0
    }
}

/// Trained kernel model: support rows, per-class dual weights, bandwidth
/// and regularization.
#[derive(Debug, Clone, PartialEq)]
pub struct KernelModel {
    support: Vec<Vec<f64>>,
    /// Row-major `support.len() × classes.len()` dual weights.
    weights: Vec<f64>,
    classes: Vec<usize>,
    sigma: f64,
    lambda: f64,
}

#[derive(Serialize, Deserialize)]
struct ModelHeader {
    #[serde(rename = "M")]
    width: usize,
    #[serde(rename = "C")]
    class_count: usize,
    sigma: f64,
    lambda: f64,
    rows: usize,
    classes: Vec<usize>,
}

/// In-place Cholesky factorization (lower triangle) of a symmetric
/// positive-definite matrix; fails on a non-positive pivot.
fn cholesky(a: &mut [f64], n: usize) -> bool {
    for j in 0..n {
        let mut diag = a[j * n + j];
        for k in 0..j {
            diag -= a[j * n + k] * a[j * n + k];
        }
        if diag <= 0.0 {
            return false;
        }
        let diag = diag.sqrt();
        a[j * n + j] = diag;
        for i in (j + 1)..n {
            let mut v = a[i * n + j];
            for k in 0..j {
                v -= a[i * n + k] * a[j * n + k];
            }
            a[i * n + j] = v / diag;
        }
    }
    true
}

/// Solve `L·Lᵀ x = b` for each right-hand side column packed in `b`
/// (row-major `n × m`).
fn cholesky_solve(l: &[f64], n: usize, b: &mut [f64], m: usize) {
    // forward: L y = b
    for i in 0..n {
        for c in 0..m {
            let mut v = b[i * m + c];
            for k in 0..i {
                v -= l[i * n + k] * b[k * m + c];
            }
            b[i * m + c] = v / l[i * n + i];
        }
    }
    // backward: Lᵀ x = y
    for i in (0..n).rev() {
        for c in 0..m {
            let mut v = b[i * m + c];
            for k in (i + 1)..n {
                v -= l[k * n + i] * b[k * m + c];
            }
            b[i * m + c] = v / l[i * n + i];
        }
    }
}

/// Fit the kernel model. Needs at least two classes and `λ > 0`; the
/// Gram solve escalates jitter (λ, 10λ, 100λ) if the factorization hits a
/// non-positive pivot.
pub fn train(rows: &[Vec<f64>], labels: &[usize], sigma: f64, lambda: f64) -> Result<KernelModel> {
    if sigma <= 0.0 {
        return Err(Error::NonPositiveBandwidth(sigma));
    }
    if lambda < 0.0 {
        return Err(Error::InvalidConfig(format!(
            "regularization must be nonnegative, got {lambda}"
        )));
    }
    if rows.is_empty() || rows.len() != labels.len() {
        return Err(Error::InvalidConfig(
            "training rows and labels must be nonempty and aligned".into(),
        ));
    }
    let mut classes: Vec<usize> = labels.to_vec();
    classes.sort_unstable();
    classes.dedup();
    if classes.len() < 2 {
        return Err(Error::SingleClass);
    }
    let n = rows.len();
    let c = classes.len();
    let mut gram = vec![0.0f64; n * n];
    gram.par_chunks_mut(n).enumerate().for_each(|(i, out)| {
        for j in 0..n {
            out[j] = gaussian_kernel(&rows[i], &rows[j], sigma).expect("validated inputs");
        }
    });
    let mut onehot = vec![0.0f64; n * c];
    for (i, &l) in labels.iter().enumerate() {
        let k = classes.binary_search(&l).expect("classes cover labels");
        onehot[i * c + k] = 1.0;
    }
    let mut weights = None;
    for escalation in 0..3 {
        let jitter = lambda * 10f64.powi(escalation);
        let mut a = gram.clone();
        for i in 0..n {
            a[i * n + i] += jitter;
        }
        if cholesky(&mut a, n) {
            let mut b = onehot.clone();
            cholesky_solve(&a, n, &mut b, c);
            weights = Some(b);
            break;
        }
    }
    let weights = weights.ok_or(Error::SingularSystem)?;
    Ok(KernelModel {
        support: rows.to_vec(),
        weights,
        classes,
        sigma,
        lambda,
    })
}

impl KernelModel {
    pub fn classes(&self) -> &[usize] {
        &self.classes
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn input_width(&self) -> usize {
        self.support.first().map_or(0, Vec::len)
    }

    /// Kernel score per class, in `classes()` order.
    pub fn scores(&self, row: &[f64]) -> Result<Vec<f64>> {
        if row.len() != self.input_width() {
            return Err(Error::FeatureLengthMismatch {
                got: row.len(),
                expected: self.input_width(),
            });
        }
        let c = self.classes.len();
        let mut scores = vec![0.0f64; c];
        for (i, support) in self.support.iter().enumerate() {
            let k = gaussian_kernel(support, row, self.sigma)?;
            for (s, w) in scores.iter_mut().zip(&self.weights[i * c..(i + 1) * c]) {
                *s += k * w;
            }
        }
        Ok(scores)
    }

    /// Serialize as a JSON header followed by little-endian doubles
    /// (support rows then weights).
    pub fn save(&self, path: &Path) -> Result<()> {
        let header = ModelHeader {
            width: self.input_width(),
            class_count: self.classes.len(),
            sigma: self.sigma,
            lambda: self.lambda,
            rows: self.support.len(),
            classes: self.classes.clone(),
        };
        let header_bytes = serde_json::to_vec(&header)?;
        let mut file = std::fs::File::create(path)?;
        file.write_all(&(header_bytes.len() as u64).to_le_bytes())?;
        file.write_all(&header_bytes)?;
        let mut write_doubles = |values: &[f64]| -> Result<()> {
            let mut buf = Vec::with_capacity(values.len() * 8);
            for v in values {
                buf.extend_from_slice(&v.to_le_bytes());
            }
            file.write_all(&buf)?;
            Ok(())
        };
        for row in &self.support {
            write_doubles(row)?;
        }
        write_doubles(&self.weights)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let mut file = std::fs::File::open(path)?;
        let mut len_bytes = [0u8; 8];
        file.read_exact(&mut len_bytes)?;
        let header_len = u64::from_le_bytes(len_bytes) as usize;
        let mut header_bytes = vec![0u8; header_len];
        file.read_exact(&mut header_bytes)?;
        let header: ModelHeader = serde_json::from_slice(&header_bytes)?;
        let mut read_doubles = |count: usize| -> Result<Vec<f64>> {
            let mut buf = vec![0u8; count * 8];
            file.read_exact(&mut buf)?;
            Ok(buf
                .chunks_exact(8)
                .map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunks")))
                .collect())
        };
        let mut support = Vec::with_capacity(header.rows);
        for _ in 0..header.rows {
            support.push(read_doubles(header.width)?);
        }
        let weights = read_doubles(header.rows * header.class_count)?;
        Ok(KernelModel {
            support,
            weights,
            classes: header.classes,
            sigma: header.sigma,
            lambda: header.lambda,
        })
    }
}

/// Predicted class label: argmax kernel score, ties to the lowest class
/// id (classes are stored sorted).
pub fn predict(model: &KernelModel, row: &[f64]) -> Result<usize> {
    let scores = model.scores(row)?;
    let mut best = 0usize;
    for (k, &s) in scores.iter().enumerate() {
        if s > scores[best] {
            best = k;
        }
    }
    Ok(model.classes[best])
}

/// Misclassified fraction over a test set; rows score in parallel.
pub fn error_rate(model: &KernelModel, rows: &[Vec<f64>], labels: &[usize]) -> Result<f64> {
    if rows.is_empty() || rows.len() != labels.len() {
        return Err(Error::InvalidConfig(
            "test rows and labels must be nonempty and aligned".into(),
        ));
    }
    let errors: Result<usize> = rows
        .par_iter()
        .zip(labels)
        .map(|(row, &label)| Ok(usize::from(predict(model, row)? != label)))
        .sum();
    Ok(errors? as f64 / rows.len() as f64)
}

/// Per-class misclassified fractions, keyed like `model.classes()`.
pub fn per_class_errors(model: &KernelModel, rows: &[Vec<f64>], labels: &[usize]) -> Result<Vec<f64>> {
    let mut wrong = vec![0usize; model.classes.len()];
    let mut total = vec![0usize; model.classes.len()];
    for (row, &label) in rows.iter().zip(labels) {
        if let Ok(k) = model.classes.binary_search(&label) {
            total[k] += 1;
            if predict(model, row)? != label {
                wrong[k] += 1;
            }
        }
    }
    Ok(wrong
        .iter()
        .zip(&total)
        .map(|(&w, &t)| if t == 0 { 0.0 } else { w as f64 / t as f64 })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn blobs(n_per: usize, seed: u64) -> (Vec<Vec<f64>>, Vec<usize>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut rows = Vec::new();
        let mut labels = Vec::new();
        for (label, center) in [(0usize, (-2.0, -2.0)), (1usize, (2.0, 2.0))] {
            for _ in 0..n_per {
                rows.push(vec![
                    center.0 + rng.random_range(-0.5..0.5),
                    center.1 + rng.random_range(-0.5..0.5),
                ]);
                labels.push(label);
            }
        }
        (rows, labels)
    }

    #[test]
    fn kernel_basics() {
        let u = vec![1.0, 2.0];
        assert_eq!(gaussian_kernel(&u, &u, 0.7).unwrap(), 1.0);
        let v = vec![1.0, 2.0 + 0.7 * std::f64::consts::SQRT_2];
        let k = gaussian_kernel(&u, &v, 0.7).unwrap();
        assert!((k - (-1.0f64).exp()).abs() < 1e-12);
        assert_eq!(
            gaussian_kernel(&u, &v, 0.7).unwrap(),
            gaussian_kernel(&v, &u, 0.7).unwrap()
        );
        assert!(gaussian_kernel(&u, &v, 0.0).is_err());
        assert!(gaussian_kernel(&u, &[1.0], 1.0).is_err());
    }

    #[test]
    fn separable_blobs_train_error_zero() {
        let (rows, labels) = blobs(50, 1);
        let sigma = median_distance(&rows, 1000);
        let model = train(&rows, &labels, sigma, 1e-3).unwrap();
        assert_eq!(error_rate(&model, &rows, &labels).unwrap(), 0.0);
        let per_class = per_class_errors(&model, &rows, &labels).unwrap();
        assert_eq!(per_class, vec![0.0, 0.0]);
    }

    #[test]
    fn single_point_per_class_predicts_nearest() {
        let rows = vec![vec![0.0, 0.0], vec![10.0, 10.0]];
        let labels = vec![3, 7];
        let model = train(&rows, &labels, 2.0, 1e-6).unwrap();
        assert_eq!(predict(&model, &[0.5, 0.1]).unwrap(), 3);
        assert_eq!(predict(&model, &[9.0, 9.5]).unwrap(), 7);
    }

    #[test]
    fn duplicate_rows_stay_finite() {
        let rows = vec![vec![1.0, 1.0]; 6]
            .into_iter()
            .chain(vec![vec![-1.0, -1.0]; 6])
            .collect::<Vec<_>>();
        let labels = vec![0, 0, 0, 0, 0, 0, 1, 1, 1, 1, 1, 1];
        let model = train(&rows, &labels, 1.0, 1e-3).unwrap();
        assert!(model.weights.iter().all(|w| w.is_finite()));
        assert_eq!(error_rate(&model, &rows, &labels).unwrap(), 0.0);
    }

    #[test]
    fn single_class_rejected() {
        let rows = vec![vec![0.0], vec![1.0]];
        assert!(matches!(train(&rows, &[1, 1], 1.0, 1e-3), Err(Error::SingleClass)));
    }

    #[test]
    fn prediction_invariant_to_training_order() {
        let (rows, labels) = blobs(20, 9);
        let model = train(&rows, &labels, 1.5, 1e-3).unwrap();
        let mut order: Vec<usize> = (0..rows.len()).collect();
        order.reverse();
        let rows2: Vec<Vec<f64>> = order.iter().map(|&i| rows[i].clone()).collect();
        let labels2: Vec<usize> = order.iter().map(|&i| labels[i]).collect();
        let model2 = train(&rows2, &labels2, 1.5, 1e-3).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(33);
        for _ in 0..20 {
            let probe = vec![rng.random_range(-3.0..3.0), rng.random_range(-3.0..3.0)];
            assert_eq!(
                predict(&model, &probe).unwrap(),
                predict(&model2, &probe).unwrap()
            );
        }
    }

    #[test]
    fn training_error_shrinks_with_lambda() {
        let (rows, labels) = blobs(30, 21);
        let loose = train(&rows, &labels, 1.0, 1.0).unwrap();
        let tight = train(&rows, &labels, 1.0, 1e-9).unwrap();
        let e_loose = error_rate(&loose, &rows, &labels).unwrap();
        let e_tight = error_rate(&tight, &rows, &labels).unwrap();
        assert!(e_tight <= e_loose);
        assert_eq!(e_tight, 0.0);
    }

    #[test]
    fn kernel_matrix_is_positive_semidefinite() {
        // Jacobi eigenvalue iteration on a small random Gram matrix.
        let mut rng = ChaCha8Rng::seed_from_u64(15);
        let rows: Vec<Vec<f64>> = (0..15)
            .map(|_| (0..4).map(|_| rng.random_range(-2.0..2.0)).collect())
            .collect();
        let n = rows.len();
        let mut a = vec![0.0f64; n * n];
        for i in 0..n {
            for j in 0..n {
                a[i * n + j] = gaussian_kernel(&rows[i], &rows[j], 1.3).unwrap();
            }
        }
        for _sweep in 0..60 {
            let mut off = 0.0f64;
            for p in 0..n {
                for q in (p + 1)..n {
                    off += a[p * n + q].abs();
                    if a[p * n + q].abs() < 1e-14 {
                        continue;
                    }
                    let theta = 0.5 * (2.0 * a[p * n + q]).atan2(a[q * n + q] - a[p * n + p]);
                    let (s, c) = theta.sin_cos();
                    for k in 0..n {
                        let (apk, aqk) = (a[p * n + k], a[q * n + k]);
                        a[p * n + k] = c * apk - s * aqk;
                        a[q * n + k] = s * apk + c * aqk;
                    }
                    for k in 0..n {
                        let (akp, akq) = (a[k * n + p], a[k * n + q]);
                        a[k * n + p] = c * akp - s * akq;
                        a[k * n + q] = s * akp + c * akq;
                    }
                }
            }
            if off < 1e-13 {
                break;
            }
        }
        for i in 0..n {
            assert!(a[i * n + i] >= -1e-8, "eigenvalue {} negative", a[i * n + i]);
        }
    }

    #[test]
    fn model_file_round_trip() {
        let (rows, labels) = blobs(10, 77);
        let model = train(&rows, &labels, 1.2, 1e-3).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.bin");
        model.save(&path).unwrap();
        let back = KernelModel::load(&path).unwrap();
        assert_eq!(model, back);
    }
}
