//! Supervised dimension reduction: greedy partial-least-squares feature
//! selection with Gram-Schmidt orthogonalization.
//!
//! For each class, features are picked one at a time to maximize the
//! correlation of the orthogonalized residual with the one-versus-all
//! class indicator; each pick is orthonormalized against the previous
//! ones and recorded as a linear combination of the selected raw columns.
//! The union over classes forms a dictionary of size `M = K·C` that maps
//! raw scattering features to a reduced vector.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::multires::MultiresApprox;
use crate::scattering::{kept_columns, order_of, transform};

/// Provenance of one raw feature column: ensemble member, node index and
/// feature index of the top scattering layer.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ColumnMeta {
    pub member: usize,
    pub n: usize,
    pub q: usize,
}

/// Dense row-major matrix of raw features: one row per training example.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
    column_meta: Vec<ColumnMeta>,
}

impl FeatureMatrix {
    pub fn new(rows: usize, cols: usize, data: Vec<f64>, column_meta: Vec<ColumnMeta>) -> Result<Self> {
        if data.len() != rows * cols || column_meta.len() != cols {
            return Err(Error::InvalidConfig(
                "feature matrix data or metadata does not match its shape".into(),
            ));
        }
        if !data.iter().all(|v| v.is_finite()) {
            return Err(Error::InvalidConfig("feature matrix entries must be finite".into()));
        }
        let mut seen = column_meta.clone();
        seen.sort_by_key(|m| (m.member, m.n, m.q));
        if seen.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::InvalidConfig("duplicate feature column metadata".into()));
        }
        Ok(FeatureMatrix {
            rows,
            cols,
            data,
            column_meta,
        })
    }

    /// Rows of plain vectors with synthetic metadata (`member 0, n 0, q = index`).
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        let meta = (0..cols).map(|q| ColumnMeta { member: 0, n: 0, q }).collect();
        let mut data = Vec::with_capacity(rows.len() * cols);
        for r in rows {
            if r.len() != cols {
                return Err(Error::InvalidConfig("ragged feature rows".into()));
            }
            data.extend_from_slice(r);
        }
        Self::new(rows.len(), cols, data, meta)
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn column(&self, c: usize) -> Vec<f64> {
        (0..self.rows).map(|i| self.data[i * self.cols + c]).collect()
    }

    pub fn column_meta(&self) -> &[ColumnMeta] {
        &self.column_meta
    }
}

/// Pool order-truncated top-layer coefficients of every ensemble member
/// into one feature row per signal, with full column provenance. The
/// flattening order is members, then `(n, q)` lexicographic with `q`
/// restricted to orders ≤ `max_order` — the same order `truncate_by_order`
/// emits.
pub fn scattering_feature_matrix(
    signals: &[Vec<f64>],
    members: &[MultiresApprox],
    depth: usize,
    max_order: usize,
) -> Result<FeatureMatrix> {
    if signals.is_empty() || members.is_empty() {
        return Err(Error::EmptyBatch);
    }
    let d = signals[0].len();
    let kept = kept_columns(depth, max_order);
    let rows_per_member = d >> depth;
    let cols = members.len() * rows_per_member * kept.len();
    let mut column_meta = Vec::with_capacity(cols);
    for member in 0..members.len() {
        for n in 0..rows_per_member {
            for &q in &kept {
                column_meta.push(ColumnMeta { member, n, q });
            }
        }
    }
    let rows: Result<Vec<Vec<f64>>> = signals
        .par_iter()
        .map(|x| {
            let mut row = Vec::with_capacity(cols);
            for m in members {
                let top = transform(x, m, depth)?.pop().expect("depth+1 layers");
                row.extend(crate::scattering::truncate_by_order(&top, max_order));
            }
            Ok(row)
        })
        .collect();
    let rows = rows?;
    let mut data = Vec::with_capacity(signals.len() * cols);
    for r in &rows {
        data.extend_from_slice(r);
    }
    FeatureMatrix::new(signals.len(), cols, data, column_meta)
}

/// Per-order share of the total squared feature mass in a matrix built by
/// [`scattering_feature_matrix`]; diagnostic only (higher orders are
/// expected to carry little energy on real data, but that is
/// data-dependent).
pub fn order_energy_profile(matrix: &FeatureMatrix, depth: usize) -> Vec<f64> {
    let mut energy = vec![0.0f64; depth + 1];
    for i in 0..matrix.rows() {
        let row = matrix.row(i);
        for (c, meta) in matrix.column_meta().iter().enumerate() {
            let order = order_of(meta.q, depth).map(|o| o.order).unwrap_or(0);
            energy[order] += row[c] * row[c];
        }
    }
    let total: f64 = energy.iter().sum();
    if total > 0.0 {
        for e in &mut energy {
            *e /= total;
        }
    }
    energy
}

/// Column standardization fitted on training rows: kept column ids (in
/// ascending order, constants dropped), their means and standard
/// deviations.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Standardizer {
    pub kept: Vec<usize>,
    pub means: Vec<f64>,
    pub stds: Vec<f64>,
}

impl Standardizer {
    /// Keep every column untouched (means 0, scales 1). Selection on raw
    /// columns is scale-sensitive; this exists as the documented knob for
    /// pipelines that need a strictly linear projection.
    pub fn identity(cols: usize) -> Self {
        Standardizer {
            kept: (0..cols).collect(),
            means: vec![0.0; cols],
            stds: vec![1.0; cols],
        }
    }

    pub fn fit(matrix: &FeatureMatrix) -> Self {
        let rows = matrix.rows() as f64;
        let mut kept = Vec::new();
        let mut means = Vec::new();
        let mut stds = Vec::new();
        for c in 0..matrix.cols() {
            let col = matrix.column(c);
            let mean: f64 = col.iter().sum::<f64>() / rows;
            let var: f64 = col.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / rows;
            let std = var.sqrt();
            if std > 1e-12 {
                kept.push(c);
                means.push(mean);
                stds.push(std);
            }
        }
        Standardizer { kept, means, stds }
    }

    pub fn apply(&self, raw: &[f64]) -> Vec<f64> {
        self.kept
            .iter()
            .enumerate()
            .map(|(k, &c)| (raw[c] - self.means[k]) / self.stds[k])
            .collect()
    }

    /// Standardized column `k` over all rows of a matrix.
    fn column(&self, matrix: &FeatureMatrix, k: usize) -> Vec<f64> {
        let c = self.kept[k];
        (0..matrix.rows())
            .map(|i| (matrix.row(i)[c] - self.means[k]) / self.stds[k])
            .collect()
    }
}

/// Greedy selection for one class: selected raw column ids, the
/// orthonormalization coefficients over the selected standardized
/// columns, and the training regression error after each step.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassSelection {
    pub class: usize,
    /// Raw column ids in selection order.
    pub selected: Vec<usize>,
    /// `coefs[k]` expresses the k-th orthonormal feature as a linear
    /// combination of the first `k+1` selected standardized columns.
    pub coefs: Vec<Vec<f64>>,
    /// Mean-square regression error of the class indicator after each step.
    pub mse: Vec<f64>,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Greedy PLS selection of up to `k` features for class `class`.
///
/// Stops early when every remaining residual column drops below the rank
/// threshold; the returned selection then reports the achievable count.
pub fn pls_select(
    matrix: &FeatureMatrix,
    labels: &[usize],
    class: usize,
    k: usize,
) -> Result<ClassSelection> {
    let standardizer = Standardizer::fit(matrix);
    pls_select_standardized(matrix, &standardizer, labels, class, k)
}

fn pls_select_standardized(
    matrix: &FeatureMatrix,
    standardizer: &Standardizer,
    labels: &[usize],
    class: usize,
    k: usize,
) -> Result<ClassSelection> {
    let rows = matrix.rows();
    if labels.len() != rows {
        return Err(Error::InvalidConfig("label count must match feature rows".into()));
    }
    if !labels.iter().any(|&l| l == class) {
        return Err(Error::EmptyClass(class));
    }
    // One-versus-all indicator. With standardized (centered) columns the
    // regression carries an implicit intercept, so the indicator is
    // centered too; correlations with centered columns are unchanged and
    // the recorded regression error can actually reach zero.
    let centered = !standardizer.means.iter().all(|&m| m == 0.0);
    let mut target: Vec<f64> = labels.iter().map(|&l| if l == class { 1.0 } else { 0.0 }).collect();
    if centered {
        let mean = target.iter().sum::<f64>() / rows as f64;
        for t in &mut target {
            *t -= mean;
        }
    }
    let n_cols = standardizer.kept.len();
    // Residual copies of every standardized column, shrunk in place as
    // selected features are projected out.
    let mut residual: Vec<Vec<f64>> = (0..n_cols).map(|c| standardizer.column(matrix, c)).collect();
    let norm_floor = 1e-12 * (rows as f64).sqrt().max(1.0);

    let mut selected = Vec::new();
    let mut coefs: Vec<Vec<f64>> = Vec::new();
    let mut basis: Vec<Vec<f64>> = Vec::new();
    let mut picked = vec![false; n_cols];
    let target_sq = dot(&target, &target);
    let mut explained = 0.0f64;
    let mut mse = Vec::new();

    for _ in 0..k {
        let mut best: Option<(f64, usize)> = None;
        for c in 0..n_cols {
            if picked[c] {
                continue;
            }
            let norm = dot(&residual[c], &residual[c]).sqrt();
            if norm < norm_floor {
                continue;
            }
            let score = dot(&target, &residual[c]).abs() / norm;
            let better = match best {
                None => true,
                Some((s, idx)) => score > s + 1e-15 * s.abs().max(1.0) ||
                    ((score - s).abs() <= 1e-15 * s.abs().max(1.0) && c < idx),
            };
            if better {
                best = Some((score, c));
            }
        }
        let Some((_, pick)) = best else {
            break; // rank exhausted
        };
        // Orthonormalize the picked column against the basis, tracking the
        // combination over selected standardized columns. One
        // re-orthogonalization pass keeps the basis numerically tight.
        let mut v = standardizer.column(matrix, pick);
        let mut coef = vec![0.0f64; basis.len() + 1];
        coef[basis.len()] = 1.0;
        for _pass in 0..2 {
            for (r, b) in basis.iter().enumerate() {
                let g = dot(&v, b);
                for (vi, bi) in v.iter_mut().zip(b) {
                    *vi -= g * bi;
                }
                for (ci, pi) in coef.iter_mut().zip(coefs[r].iter().chain(std::iter::repeat(&0.0))) {
                    *ci -= g * pi;
                }
            }
        }
        let norm = dot(&v, &v).sqrt();
        if norm < norm_floor {
            break;
        }
        for vi in &mut v {
            *vi /= norm;
        }
        for ci in &mut coef {
            *ci /= norm;
        }
        // Project the new direction out of the remaining residuals.
        residual.par_iter_mut().enumerate().for_each(|(c, col)| {
            if !picked[c] {
                let g = dot(col, &v);
                for (xi, vi) in col.iter_mut().zip(&v) {
                    *xi -= g * vi;
                }
            }
        });
        picked[pick] = true;
        let beta = dot(&target, &v);
        explained += beta * beta;
        mse.push((target_sq - explained).max(0.0) / rows as f64);
        selected.push(standardizer.kept[pick]);
        coefs.push(coef);
        basis.push(v);
    }
    Ok(ClassSelection {
        class,
        selected,
        coefs,
        mse,
    })
}

/// The reduced-feature map: standardization plus per-class orthonormal
/// combinations; projecting a raw vector yields `M = Σ_c K_c` values in
/// class order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureDictionary {
    pub input_width: usize,
    pub standardizer: Standardizer,
    pub classes: Vec<ClassSelection>,
    pub column_meta: Vec<ColumnMeta>,
}

impl FeatureDictionary {
    /// Total output dimension `M`.
    pub fn output_width(&self) -> usize {
        self.classes.iter().map(|c| c.selected.len()).sum()
    }

    pub fn to_json_string(&self) -> String {
        serde_json::to_string_pretty(self).expect("dictionary serialization cannot fail")
    }

    pub fn from_json_str(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }
}

/// Run the per-class selections (in parallel) and bundle them into a
/// dictionary. `k` features per class; classes are the sorted distinct
/// labels. Columns are standardized before selection; pass
/// `standardize = false` to select on raw columns, which makes the
/// projection strictly linear (zero maps to zero) at the price of
/// scale-sensitive selection.
pub fn build_dictionary_with(
    matrix: &FeatureMatrix,
    labels: &[usize],
    k: usize,
    standardize: bool,
) -> Result<FeatureDictionary> {
    let mut classes: Vec<usize> = labels.to_vec();
    classes.sort_unstable();
    classes.dedup();
    let standardizer = if standardize {
        Standardizer::fit(matrix)
    } else {
        Standardizer::identity(matrix.cols())
    };
    let selections: Result<Vec<ClassSelection>> = classes
        .par_iter()
        .map(|&c| pls_select_standardized(matrix, &standardizer, labels, c, k))
        .collect();
    Ok(FeatureDictionary {
        input_width: matrix.cols(),
        standardizer,
        classes: selections?,
        column_meta: matrix.column_meta().to_vec(),
    })
}

/// [`build_dictionary_with`] using standardized columns.
pub fn build_dictionary(matrix: &FeatureMatrix, labels: &[usize], k: usize) -> Result<FeatureDictionary> {
    build_dictionary_with(matrix, labels, k, true)
}

/// Apply the dictionary to one raw feature vector.
pub fn project(dictionary: &FeatureDictionary, raw: &[f64]) -> Result<Vec<f64>> {
    if raw.len() != dictionary.input_width {
        return Err(Error::FeatureLengthMismatch {
            got: raw.len(),
            expected: dictionary.input_width,
        });
    }
    let std_row = dictionary.standardizer.apply(raw);
    let kept_index: std::collections::HashMap<usize, usize> = dictionary
        .standardizer
        .kept
        .iter()
        .enumerate()
        .map(|(k, &c)| (c, k))
        .collect();
    let mut out = Vec::with_capacity(dictionary.output_width());
    for class in &dictionary.classes {
        for coef in &class.coefs {
            let mut value = 0.0;
            for (t, &w) in coef.iter().enumerate() {
                let col = class.selected[t];
                value += w * std_row[kept_index[&col]];
            }
            out.push(value);
        }
    }
    Ok(out)
}

/// Project every row of a feature matrix.
pub fn project_matrix(dictionary: &FeatureDictionary, matrix: &FeatureMatrix) -> Result<Vec<Vec<f64>>> {
    (0..matrix.rows())
        .into_par_iter()
        .map(|i| project(dictionary, matrix.row(i)))
        .collect()
}
