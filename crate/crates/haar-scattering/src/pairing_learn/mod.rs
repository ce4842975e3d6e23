//! Unsupervised estimation of multiresolution approximations.
//!
//! Each level pairs the current nodes by minimum-weight perfect matching
//! of the average-total-variation cost between their scattering rows,
//! aggregating fine to coarse. Minimizing that cost at level `j` is the
//! same as minimizing the l1 norm of the next layer, so the learned
//! hierarchy yields the sparsest cascade the matching can achieve per
//! level. An ensemble splits the training set into disjoint subsets and
//! learns one multiresolution per subset.

mod blossom;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::multires::{MultiresApprox, Pairing};
use crate::scattering::{apply_pairing, ScatteringTensor};

/// Cost quantization step: costs are scaled by `2^20` and rounded to
/// integers before matching, so each matched edge carries at most
/// `QUANT_STEP / 2` of rounding error and a total of `d'/2 · QUANT_STEP / 2`
/// over a pairing.
pub const QUANT_STEP: f64 = 1.0 / ((1u64 << 20) as f64);

/// Largest node count accepted by the brute-force enumerator.
pub const BRUTE_FORCE_LIMIT: usize = 14;

/// Symmetric nonnegative pairing costs over `size` nodes with zero
/// diagonal: entry `(a, b)` accumulates `Σ_q Σ_i |S_j x_i(a,q) − S_j x_i(b,q)|`.
#[derive(Debug, Clone, PartialEq)]
pub struct PairingCostMatrix {
    size: usize,
    costs: Vec<f64>,
}

impl PairingCostMatrix {
    pub fn new(size: usize) -> Self {
        PairingCostMatrix {
            size,
            costs: vec![0.0; size * size],
        }
    }

    /// Build from an explicit symmetric cost function.
    pub fn from_fn(size: usize, mut cost: impl FnMut(usize, usize) -> f64) -> Self {
        let mut m = Self::new(size);
        for a in 0..size {
            for b in (a + 1)..size {
                let c = cost(a, b);
                m.set(a, b, c);
            }
        }
        m
    }

    pub fn size(&self) -> usize {
        self.size
    }

    pub fn get(&self, a: usize, b: usize) -> f64 {
        self.costs[a * self.size + b]
    }

    pub fn set(&mut self, a: usize, b: usize, cost: f64) {
        self.costs[a * self.size + b] = cost;
        self.costs[b * self.size + a] = cost;
    }

    /// Total cost of a pairing under this matrix.
    pub fn pairing_cost(&self, pairing: &Pairing) -> f64 {
        pairing.pairs().iter().map(|&(a, b)| self.get(a, b)).sum()
    }
}

/// Accumulate the total-variation cost matrix from one scattering layer
/// per training signal; all tensors must share level and shape. The sum
/// over signals is associative, so rows accumulate in parallel.
pub fn build_cost_matrix(batch: &[ScatteringTensor]) -> Result<PairingCostMatrix> {
    let first = batch.first().ok_or(Error::EmptyBatch)?;
    let (rows, cols, level) = (first.rows(), first.cols(), first.level());
    if batch
        .iter()
        .any(|t| t.rows() != rows || t.cols() != cols || t.level() != level)
    {
        return Err(Error::BatchShapeMismatch);
    }
    let mut costs = vec![0.0; rows * rows];
    costs
        .par_chunks_mut(rows)
        .enumerate()
        .for_each(|(a, row_out)| {
            for b in 0..rows {
                if b == a {
                    continue;
                }
                let mut acc = 0.0;
                for tensor in batch {
                    let ra = tensor.row(a);
                    let rb = tensor.row(b);
                    for q in 0..cols {
                        acc += (ra[q] - rb[q]).abs();
                    }
                }
                row_out[b] = acc;
            }
        });
    Ok(PairingCostMatrix { size: rows, costs })
}

/// How a matching was computed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum MatchingMethod {
    ExactBlossom,
    BruteForce,
    Greedy,
}

/// A perfect matching together with its total cost under the original
/// (unquantized) matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct MatchingResult {
    pub pairing: Pairing,
    pub total_cost: f64,
    pub method: MatchingMethod,
}

/// Quantize costs to integers. Ties between equal-cost optima are broken
/// by a secondary span penalty (`b - a` per matched pair) that prefers
/// pairings of nearby indices; on an all-equal matrix this selects the
/// lexicographically smallest pairing. The penalty is skipped when the
/// scaled weights would not fit comfortably in 64 bits, in which case the
/// result is still deterministic, just not canonically tie-broken.
fn quantized_weights(matrix: &PairingCostMatrix) -> Result<(Vec<i64>, i64)> {
    let n = matrix.size();
    let scale = (1u64 << 20) as f64;
    let mut quantized = vec![0i64; n * n];
    let mut max_q = 0i64;
    for a in 0..n {
        for b in 0..n {
            let c = matrix.get(a, b);
            if !c.is_finite() || c < 0.0 {
                return Err(Error::InvalidConfig(format!(
                    "cost ({a}, {b}) = {c} must be finite and nonnegative"
                )));
            }
            let q = (c * scale).round();
            if q >= (1i64 << 58) as f64 {
                return Err(Error::InvalidConfig(format!(
                    "cost ({a}, {b}) = {c} too large for exact integer matching"
                )));
            }
            quantized[a * n + b] = q as i64;
            max_q = max_q.max(q as i64);
        }
    }
    let span_scale = ((n * n).max(2) as u64).next_power_of_two() as i64;
    let penalty_scale = if max_q.saturating_mul(span_scale) < (1i64 << 58) {
        span_scale
    } else {
        1
    };
    Ok((quantized, penalty_scale))
}

/// Exact minimum-weight perfect matching of the complete graph on the
/// matrix nodes via the blossom method on quantized weights.
pub fn blossom_matching(matrix: &PairingCostMatrix) -> Result<MatchingResult> {
    let n = matrix.size();
    if n == 0 || n % 2 != 0 {
        return Err(Error::OddMatchingSize(n));
    }
    let (quantized, penalty_scale) = quantized_weights(matrix)?;
    // Minimum-weight perfect matching == maximum-weight maximum-cardinality
    // matching on (max - w); a complete graph with even order always has a
    // perfect matching, which maximum cardinality enforces.
    let mut penalized = vec![0i64; n * n];
    let mut max_w = 0i64;
    for a in 0..n {
        for b in (a + 1)..n {
            let w = quantized[a * n + b] * penalty_scale
                + if penalty_scale > 1 { (b - a) as i64 } else { 0 };
            penalized[a * n + b] = w;
            max_w = max_w.max(w);
        }
    }
    let mut edges = Vec::with_capacity(n * (n - 1) / 2);
    for a in 0..n {
        for b in (a + 1)..n {
            edges.push((a, b, max_w - penalized[a * n + b]));
        }
    }
    let mate = blossom::max_weight_matching(n, edges, true);
    let mut pairs = Vec::with_capacity(n / 2);
    for v in 0..n {
        let w = mate[v];
        debug_assert!(w != usize::MAX, "complete even graph must match perfectly");
        if v < w {
            pairs.push((v, w));
        }
    }
    let pairing = Pairing::new(pairs, n)?;
    let total_cost = matrix.pairing_cost(&pairing);
    Ok(MatchingResult {
        pairing,
        total_cost,
        method: MatchingMethod::ExactBlossom,
    })
}

/// Exhaustive minimum-weight perfect matching for small instances;
/// enumerates pairings in lexicographic order and keeps the first
/// optimum, so ties break to the lexicographically smallest pairing.
pub fn brute_force_matching(matrix: &PairingCostMatrix) -> Result<MatchingResult> {
    let n = matrix.size();
    if n == 0 || n % 2 != 0 {
        return Err(Error::OddMatchingSize(n));
    }
    if n > BRUTE_FORCE_LIMIT {
        return Err(Error::BruteForceTooLarge(n, BRUTE_FORCE_LIMIT));
    }
    fn recurse(
        matrix: &PairingCostMatrix,
        unmatched: &mut Vec<usize>,
        current: &mut Vec<(usize, usize)>,
        cost: f64,
        best: &mut Option<(f64, Vec<(usize, usize)>)>,
    ) {
        if unmatched.is_empty() {
            if best.as_ref().map_or(true, |(c, _)| cost < *c) {
                *best = Some((cost, current.clone()));
            }
            return;
        }
        let a = unmatched[0];
        for i in 1..unmatched.len() {
            let b = unmatched[i];
            let mut rest: Vec<usize> = unmatched
                .iter()
                .copied()
                .filter(|&v| v != a && v != b)
                .collect();
            current.push((a, b));
            recurse(matrix, &mut rest, current, cost + matrix.get(a, b), best);
            current.pop();
        }
    }
    let mut unmatched: Vec<usize> = (0..n).collect();
    let mut best = None;
    recurse(matrix, &mut unmatched, &mut Vec::new(), 0.0, &mut best);
    let (total_cost, pairs) = best.expect("even node count always admits a matching");
    Ok(MatchingResult {
        pairing: Pairing::new(pairs, n)?,
        total_cost,
        method: MatchingMethod::BruteForce,
    })
}

/// Greedy benchmark baseline: repeatedly match the globally cheapest
/// unmatched pair. Not optimal; exists to put matcher improvements in
/// context, never used in the learning path.
pub fn greedy_matching(matrix: &PairingCostMatrix) -> Result<MatchingResult> {
    let n = matrix.size();
    if n == 0 || n % 2 != 0 {
        return Err(Error::OddMatchingSize(n));
    }
    let mut order: Vec<(usize, usize)> = (0..n)
        .flat_map(|a| ((a + 1)..n).map(move |b| (a, b)))
        .collect();
    order.sort_by(|&(a1, b1), &(a2, b2)| {
        matrix
            .get(a1, b1)
            .partial_cmp(&matrix.get(a2, b2))
            .expect("finite costs")
            .then((a1, b1).cmp(&(a2, b2)))
    });
    let mut matched = vec![false; n];
    let mut pairs = Vec::with_capacity(n / 2);
    for (a, b) in order {
        if !matched[a] && !matched[b] {
            matched[a] = true;
            matched[b] = true;
            pairs.push((a, b));
        }
    }
    let pairing = Pairing::new(pairs, n)?;
    let total_cost = matrix.pairing_cost(&pairing);
    Ok(MatchingResult {
        pairing,
        total_cost,
        method: MatchingMethod::Greedy,
    })
}

/// One learned multiresolution plus the per-level matching results.
#[derive(Debug, Clone)]
pub struct LearnOutcome {
    pub multires: MultiresApprox,
    pub level_results: Vec<MatchingResult>,
}

/// Greedy layerwise learning: at each level, transform the training set
/// one step under the pairings learned so far, build the cost matrix and
/// solve the matching exactly.
pub fn learn_multires(training: &[Vec<f64>], depth: usize) -> Result<LearnOutcome> {
    if training.is_empty() {
        return Err(Error::EmptyBatch);
    }
    let d = training[0].len();
    if d == 0 || !d.is_power_of_two() {
        return Err(Error::NotPowerOfTwo(d));
    }
    let max_depth = d.trailing_zeros() as usize;
    if depth > max_depth {
        return Err(Error::DepthTooLarge {
            requested: depth,
            max: max_depth,
        });
    }
    for x in training {
        if x.len() != d {
            return Err(Error::DimensionMismatch {
                got: x.len(),
                expected: d,
            });
        }
    }
    let mut current: Vec<ScatteringTensor> = training
        .iter()
        .map(|x| ScatteringTensor::new(0, d, x.clone()))
        .collect();
    let mut pairings = Vec::with_capacity(depth);
    let mut level_results = Vec::with_capacity(depth);
    for _ in 0..depth {
        let costs = build_cost_matrix(&current)?;
        let result = blossom_matching(&costs)?;
        current = current
            .par_iter()
            .map(|t| apply_pairing(t, result.pairing.pairs()))
            .collect();
        pairings.push(result.pairing.clone());
        level_results.push(result);
    }
    Ok(LearnOutcome {
        multires: MultiresApprox::build_from_pairings(d, pairings)?,
        level_results,
    })
}

/// An ensemble of independently learned multiresolutions plus the subset
/// of training indices each member saw.
#[derive(Debug, Clone)]
pub struct EnsembleOutcome {
    pub members: Vec<LearnOutcome>,
    pub subsets: Vec<Vec<usize>>,
    pub seed: u64,
}

/// Shuffle the training indices with a seeded generator, split them into
/// `n_subsets` disjoint subsets of near-equal size and learn one
/// multiresolution per subset. Members run in parallel; identical inputs
/// and seed give identical output.
pub fn learn_ensemble(
    training: &[Vec<f64>],
    depth: usize,
    n_subsets: usize,
    seed: u64,
) -> Result<EnsembleOutcome> {
    if n_subsets == 0 || n_subsets > training.len() {
        return Err(Error::EnsembleTooLarge {
            n: n_subsets,
            train: training.len(),
        });
    }
    let mut indices: Vec<usize> = (0..training.len()).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    indices.shuffle(&mut rng);
    let base = training.len() / n_subsets;
    let extra = training.len() % n_subsets;
    let mut subsets = Vec::with_capacity(n_subsets);
    let mut start = 0;
    for i in 0..n_subsets {
        let len = base + usize::from(i < extra);
        subsets.push(indices[start..start + len].to_vec());
        start += len;
    }
    let members: Result<Vec<LearnOutcome>> = subsets
        .par_iter()
        .map(|subset| {
            let slice: Vec<Vec<f64>> = subset.iter().map(|&i| training[i].clone()).collect();
            learn_multires(&slice, depth)
        })
        .collect();
    Ok(EnsembleOutcome {
        members: members?,
        subsets,
        seed,
    })
}
