//! The Haar scattering cascade.
//!
//! Layer `j` of the cascade is a `(d / 2^j) × 2^j` array `S_j x(n, q)`;
//! each level pairs rows of the previous layer and stores the pairwise
//! sums in even columns and absolute differences in odd columns. Feature
//! indexing by scattering order (number of absolute differences on the
//! computation path) and the boolean or/xor variant live here too.

use crate::error::{Error, Result};
use crate::multires::MultiresApprox;

/// One layer of the cascade: a dense row-major `rows × cols` array with
/// `rows * cols == d` and `cols == 2^level`.
#[derive(Debug, Clone, PartialEq)]
pub struct ScatteringTensor {
    level: usize,
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl ScatteringTensor {
    pub fn new(level: usize, rows: usize, data: Vec<f64>) -> Self {
        let cols = 1usize << level;
        assert_eq!(data.len(), rows * cols, "tensor data must fill rows × 2^level");
        ScatteringTensor {
            level,
            rows,
            cols,
            data,
        }
    }

    pub fn level(&self) -> usize {
        self.level
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, n: usize, q: usize) -> f64 {
        self.data[n * self.cols + q]
    }

    pub fn row(&self, n: usize) -> &[f64] {
        &self.data[n * self.cols..(n + 1) * self.cols]
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn squared_norm(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum()
    }

    pub fn l1_norm(&self) -> f64 {
        self.data.iter().map(|v| v.abs()).sum()
    }
}

/// The permutation-invariant pair operator: `(α, β) → (α + β, |α - β|)`.
#[inline]
pub fn haar_pair(alpha: f64, beta: f64) -> (f64, f64) {
    (alpha + beta, (alpha - beta).abs())
}

/// Invert the pair operator: from `(sum, absdiff)` recover the pair as
/// `(max, min)`. Flags a negative `absdiff` or, in the nonnegative
/// regime, an `absdiff` exceeding the sum.
#[inline]
pub fn invert_pair(sum: f64, absdiff: f64) -> Result<(f64, f64)> {
    if absdiff < 0.0 || (sum >= 0.0 && absdiff > sum && (absdiff - sum) > 1e-9 * absdiff.abs().max(1.0)) {
        return Err(Error::InconsistentPair {
            sum,
            diff: absdiff,
        });
    }
    Ok(((sum + absdiff) / 2.0, (sum - absdiff) / 2.0))
}

/// Apply one cascade level: pair rows of `layer` according to `pairs`,
/// writing sums to even and absolute differences to odd columns.
pub fn apply_pairing(layer: &ScatteringTensor, pairs: &[(usize, usize)]) -> ScatteringTensor {
    let rows = layer.rows() / 2;
    let cols = layer.cols() * 2;
    let mut data = vec![0.0; rows * cols];
    for (n, &(a, b)) in pairs.iter().enumerate() {
        let ra = layer.row(a);
        let rb = layer.row(b);
        let out = &mut data[n * cols..(n + 1) * cols];
        for q in 0..layer.cols() {
            let (sum, diff) = haar_pair(ra[q], rb[q]);
            out[2 * q] = sum;
            out[2 * q + 1] = diff;
        }
    }
    ScatteringTensor {
        level: layer.level() + 1,
        rows,
        cols,
        data,
    }
}

/// Compute layers `S_0 x … S_J x` under the given multiresolution.
pub fn transform(x: &[f64], multires: &MultiresApprox, depth: usize) -> Result<Vec<ScatteringTensor>> {
    if x.len() != multires.d() {
        return Err(Error::DimensionMismatch {
            got: x.len(),
            expected: multires.d(),
        });
    }
    if depth > multires.depth() {
        return Err(Error::DepthTooLarge {
            requested: depth,
            max: multires.depth(),
        });
    }
    let mut layers = Vec::with_capacity(depth + 1);
    layers.push(ScatteringTensor::new(0, x.len(), x.to_vec()));
    for j in 0..depth {
        let next = apply_pairing(&layers[j], multires.pairing(j).pairs());
        layers.push(next);
    }
    Ok(layers)
}

/// Scattering order decomposition of a feature index `q` at depth `J`:
/// `q = Σ_k 2^(J - j_k)` with strictly increasing scales `j_k`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OrderIndex {
    pub q: usize,
    pub order: usize,
    /// Ascending scales `j_1 < … < j_m`, each in `1..=J`.
    pub scales: Vec<usize>,
}

/// Decompose feature index `q < 2^J` into its order and scale sequence.
pub fn order_of(q: usize, depth: usize) -> Result<OrderIndex> {
    if q >= (1usize << depth) {
        return Err(Error::FeatureIndexOutOfRange { q, depth });
    }
    let mut scales: Vec<usize> = (0..depth).filter(|b| q >> b & 1 == 1).map(|b| depth - b).collect();
    scales.sort_unstable();
    Ok(OrderIndex {
        q,
        order: scales.len(),
        scales,
    })
}

/// Number of order-`m` coefficients in `S_J x` for a signal of dimension
/// `d`: `C(J, m) · d / 2^J`.
pub fn count_order(depth: usize, order: usize, d: usize) -> usize {
    if order > depth {
        return 0;
    }
    binomial(depth, order) * (d >> depth)
}

fn binomial(n: usize, k: usize) -> usize {
    let k = k.min(n - k);
    let mut result = 1usize;
    for i in 0..k {
        result = result * (n - i) / (i + 1);
    }
    result
}

/// Flatten the top layer keeping only coefficients of order ≤ `max_order`,
/// in `(n, q)` lexicographic order. The same index filter drives feature
/// metadata downstream, so the emitted order is part of the contract.
pub fn truncate_by_order(top: &ScatteringTensor, max_order: usize) -> Vec<f64> {
    let kept: Vec<usize> = (0..top.cols())
        .filter(|q| (q.count_ones() as usize) <= max_order)
        .collect();
    let mut out = Vec::with_capacity(kept.len() * top.rows());
    for n in 0..top.rows() {
        let row = top.row(n);
        out.extend(kept.iter().map(|&q| row[q]));
    }
    out
}

/// Column indices of the top layer that survive order truncation,
/// ascending.
pub fn kept_columns(depth: usize, max_order: usize) -> Vec<usize> {
    (0..1usize << depth)
        .filter(|q| (q.count_ones() as usize) <= max_order)
        .collect()
}

/// Boolean layer of the or/xor cascade.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BooleanTensor {
    level: usize,
    rows: usize,
    cols: usize,
    data: Vec<bool>,
}

impl BooleanTensor {
    pub fn level(&self) -> usize {
        self.level
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, n: usize, q: usize) -> bool {
        self.data[n * self.cols + q]
    }

    pub fn data(&self) -> &[bool] {
        &self.data
    }
}

/// The boolean pair operator: `(α, β) → (α ∨ β, α ⊕ β)`.
#[inline]
pub fn boolean_pair(alpha: bool, beta: bool) -> (bool, bool) {
    (alpha | beta, alpha ^ beta)
}

/// Boolean cascade: same wiring as `transform` with the or/xor operator.
pub fn boolean_transform(
    x: &[bool],
    multires: &MultiresApprox,
    depth: usize,
) -> Result<Vec<BooleanTensor>> {
    if x.len() != multires.d() {
        return Err(Error::DimensionMismatch {
            got: x.len(),
            expected: multires.d(),
        });
    }
    if depth > multires.depth() {
        return Err(Error::DepthTooLarge {
            requested: depth,
            max: multires.depth(),
        });
    }
    let mut layers = Vec::with_capacity(depth + 1);
    layers.push(BooleanTensor {
        level: 0,
        rows: x.len(),
        cols: 1,
        data: x.to_vec(),
    });
    for j in 0..depth {
        let prev = &layers[j];
        let pairs = multires.pairing(j).pairs();
        let rows = prev.rows / 2;
        let cols = prev.cols * 2;
        let mut data = vec![false; rows * cols];
        for (n, &(a, b)) in pairs.iter().enumerate() {
            for q in 0..prev.cols {
                let (or, xor) = boolean_pair(prev.get(a, q), prev.get(b, q));
                data[n * cols + 2 * q] = or;
                data[n * cols + 2 * q + 1] = xor;
            }
        }
        layers.push(BooleanTensor {
            level: j + 1,
            rows,
            cols,
            data,
        });
    }
    Ok(layers)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::multires::{MultiresApprox, Pairing};

    fn standard_multires_4() -> MultiresApprox {
        MultiresApprox::build_from_pairings(
            4,
            vec![
                Pairing::new(vec![(0, 1), (2, 3)], 4).unwrap(),
                Pairing::new(vec![(0, 1)], 2).unwrap(),
            ],
        )
        .unwrap()
    }

    #[test]
    fn haar_pair_basics() {
        assert_eq!(haar_pair(3.0, 1.0), (4.0, 2.0));
        assert_eq!(haar_pair(1.0, 3.0), (4.0, 2.0));
        assert_eq!(haar_pair(2.5, 2.5), (5.0, 0.0));
    }

    #[test]
    fn invert_pair_recovers_max_min() {
        assert_eq!(invert_pair(4.0, 2.0).unwrap(), (3.0, 1.0));
        assert_eq!(invert_pair(5.0, 0.0).unwrap(), (2.5, 2.5));
        assert!(invert_pair(1.0, 3.0).is_err());
        assert!(invert_pair(1.0, -0.5).is_err());
    }

    #[test]
    fn hand_cascade_1234() {
        let m = standard_multires_4();
        let layers = transform(&[1.0, 2.0, 3.0, 4.0], &m, 2).unwrap();
        assert_eq!(layers[1].row(0), &[3.0, 1.0]);
        assert_eq!(layers[1].row(1), &[7.0, 1.0]);
        assert_eq!(layers[2].row(0), &[10.0, 4.0, 2.0, 0.0]);
    }

    #[test]
    fn constant_signal_kills_differences() {
        let m = standard_multires_4();
        let layers = transform(&[2.0; 4], &m, 2).unwrap();
        let top = &layers[2];
        assert_eq!(top.get(0, 0), 8.0); // 2^J · c
        for q in 1..4 {
            assert_eq!(top.get(0, q), 0.0);
        }
    }

    #[test]
    fn dimension_mismatch_rejected() {
        let m = standard_multires_4();
        assert!(matches!(
            transform(&[1.0; 3], &m, 2),
            Err(Error::DimensionMismatch { got: 3, expected: 4 })
        ));
        assert!(transform(&[1.0; 4], &m, 3).is_err());
    }

    #[test]
    fn order_of_examples() {
        assert_eq!(order_of(0, 3).unwrap().order, 0);
        let one = order_of(4, 3).unwrap();
        assert_eq!((one.order, one.scales.as_slice()), (1, &[1][..]));
        let two = order_of(6, 3).unwrap();
        assert_eq!((two.order, two.scales.as_slice()), (2, &[1, 2][..]));
        assert!(order_of(8, 3).is_err());
    }

    #[test]
    fn order_reconstructs_q() {
        for depth in 1..=10usize {
            for q in 0..(1usize << depth) {
                let idx = order_of(q, depth).unwrap();
                let rebuilt: usize = idx.scales.iter().map(|j| 1usize << (depth - j)).sum();
                assert_eq!(rebuilt, q);
                for w in idx.scales.windows(2) {
                    assert!(w[0] < w[1]);
                }
            }
        }
    }

    #[test]
    fn count_order_matches_enumeration() {
        for depth in 0..=10usize {
            let d = 1usize << depth;
            let mut histogram = vec![0usize; depth + 1];
            for q in 0..d {
                histogram[q.count_ones() as usize] += 1;
            }
            let total: usize = (0..=depth).map(|m| count_order(depth, m, d)).sum();
            assert_eq!(total, d);
            for (m, &h) in histogram.iter().enumerate() {
                assert_eq!(count_order(depth, m, d), h, "J={depth} m={m}");
            }
        }
        assert_eq!(count_order(3, 1, 8), 3);
    }

    #[test]
    fn truncation_counts() {
        let m = standard_multires_4();
        let layers = transform(&[1.0, 2.0, 3.0, 4.0], &m, 2).unwrap();
        assert_eq!(truncate_by_order(&layers[2], 2).len(), 4);
        assert_eq!(truncate_by_order(&layers[2], 0), vec![10.0]);
        // J=5 drops exactly the single order-5 column when capped at 4.
        assert_eq!(kept_columns(5, 4).len(), 31);
    }

    #[test]
    fn l1_identity_on_nonnegative_layers() {
        // ‖S_{j+1}‖₁ = ‖S_j‖₁ + Σ |pair differences| whenever the layer
        // below is nonnegative (|a + b| = a + b).
        use rand::Rng;
        use rand::SeedableRng;
        let m = standard_multires_4();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(6);
        for _ in 0..20 {
            let x: Vec<f64> = (0..4).map(|_| rng.random_range(0.0..5.0)).collect();
            let layers = transform(&x, &m, 2).unwrap();
            for j in 0..2 {
                let lower = &layers[j];
                let mut diffs = 0.0;
                for &(a, b) in m.pairing(j).pairs() {
                    for q in 0..lower.cols() {
                        diffs += (lower.get(a, q) - lower.get(b, q)).abs();
                    }
                }
                let lhs = layers[j + 1].l1_norm();
                let rhs = lower.l1_norm() + diffs;
                assert!((lhs - rhs).abs() <= 1e-12 * rhs.max(1.0));
            }
        }
    }

    #[test]
    fn boolean_pair_truth_table() {
        assert_eq!(boolean_pair(true, false), (true, true));
        assert_eq!(boolean_pair(false, true), (true, true));
        assert_eq!(boolean_pair(true, true), (true, false));
        assert_eq!(boolean_pair(false, false), (false, false));
    }

    #[test]
    fn boolean_constant_true_has_false_xors() {
        let m = standard_multires_4();
        let layers = boolean_transform(&[true; 4], &m, 2).unwrap();
        let top = &layers[2];
        assert!(top.get(0, 0));
        for q in 1..4 {
            assert!(!top.get(0, q), "xor channel {q} must be false");
        }
    }
}
