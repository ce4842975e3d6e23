//! Non-normalized orthogonal Haar basis of a multiresolution and the
//! wavelet-cascade route to scattering coefficients.
//!
//! This module exists to verify `scattering` through an independent
//! computation path: order-`m` coefficients are reproduced by repeatedly
//! applying sparse Haar wavelet analysis, taking absolute values, and
//! extending the result back onto the vertex set. It optimizes for
//! verifiability, not speed.

use crate::error::{Error, Result};
use crate::multires::MultiresApprox;

/// A Haar wavelet `ψ_{j,n}` stored by its positive and negative supports
/// (the two level-`j-1` sets merged into the level-`j` set `n`).
#[derive(Debug, Clone)]
pub struct Wavelet {
    pub level: usize,
    pub n: usize,
    pub positive: Vec<usize>,
    pub negative: Vec<usize>,
}

impl Wavelet {
    /// `⟨x, ψ⟩` by iterating the two supports.
    pub fn inner(&self, x: &[f64]) -> f64 {
        let plus: f64 = self.positive.iter().map(|&v| x[v]).sum();
        let minus: f64 = self.negative.iter().map(|&v| x[v]).sum();
        plus - minus
    }

    /// Squared norm, equal to the size of the level-`j` set: `2^j`.
    pub fn squared_norm(&self) -> f64 {
        (self.positive.len() + self.negative.len()) as f64
    }
}

/// Orthogonal Haar basis of a depth-`J` multiresolution: the indicators
/// of the level-`J` sets plus wavelets `ψ_{j,n}` for `1 ≤ j ≤ J`.
#[derive(Debug, Clone)]
pub struct HaarBasis {
    multires: MultiresApprox,
    depth: usize,
    /// `wavelets[j-1]` holds the level-`j` wavelets in node order.
    wavelets: Vec<Vec<Wavelet>>,
}

/// Build the basis for levels `1..=depth` of `multires`.
pub fn build_basis(multires: &MultiresApprox, depth: usize) -> Result<HaarBasis> {
    if depth > multires.depth() {
        return Err(Error::DepthTooLarge {
            requested: depth,
            max: multires.depth(),
        });
    }
    let mut wavelets = Vec::with_capacity(depth);
    for j in 1..=depth {
        let pairing = multires.pairing(j - 1);
        let sets = multires.vertex_sets(j - 1);
        let level: Vec<Wavelet> = pairing
            .pairs()
            .iter()
            .enumerate()
            .map(|(n, &(a, b))| Wavelet {
                level: j,
                n,
                positive: sets[a].clone(),
                negative: sets[b].clone(),
            })
            .collect();
        wavelets.push(level);
    }
    Ok(HaarBasis {
        multires: multires.clone(),
        depth,
        wavelets,
    })
}

impl HaarBasis {
    pub fn d(&self) -> usize {
        self.multires.d()
    }

    pub fn depth(&self) -> usize {
        self.depth
    }

    /// Indicator supports `V_{J,n}`.
    pub fn indicators(&self) -> &[Vec<usize>] {
        self.multires.vertex_sets(self.depth)
    }

    pub fn wavelets_at(&self, level: usize) -> &[Wavelet] {
        &self.wavelets[level - 1]
    }

    /// All basis vectors densified, indicators first then wavelets by
    /// level; used to inspect the Gram matrix.
    pub fn dense_vectors(&self) -> Vec<Vec<f64>> {
        let d = self.d();
        let mut out = Vec::with_capacity(d);
        for support in self.indicators() {
            let mut v = vec![0.0; d];
            for &i in support {
                v[i] = 1.0;
            }
            out.push(v);
        }
        for level in &self.wavelets {
            for w in level {
                let mut v = vec![0.0; d];
                for &i in &w.positive {
                    v[i] = 1.0;
                }
                for &i in &w.negative {
                    v[i] = -1.0;
                }
                out.push(v);
            }
        }
        out
    }

    /// Basis coefficients of `x`: `(⟨x, 1_{V_{J,n}}⟩ per n, ⟨x, ψ_{j,n}⟩ per level)`.
    pub fn analyze(&self, x: &[f64]) -> (Vec<f64>, Vec<Vec<f64>>) {
        let indicator_coeffs = self
            .indicators()
            .iter()
            .map(|s| s.iter().map(|&v| x[v]).sum())
            .collect();
        let wavelet_coeffs = self
            .wavelets
            .iter()
            .map(|level| level.iter().map(|w| w.inner(x)).collect())
            .collect();
        (indicator_coeffs, wavelet_coeffs)
    }

    /// Rebuild `x` from its basis coefficients, dividing by the Gram
    /// diagonal (`2^J` for indicators, `2^j` for level-`j` wavelets).
    pub fn synthesize(&self, indicator_coeffs: &[f64], wavelet_coeffs: &[Vec<f64>]) -> Vec<f64> {
        let mut x = vec![0.0; self.d()];
        let scale = (1usize << self.depth) as f64;
        for (support, &c) in self.indicators().iter().zip(indicator_coeffs) {
            for &v in support {
                x[v] += c / scale;
            }
        }
        for (level, coeffs) in self.wavelets.iter().zip(wavelet_coeffs) {
            for (w, &c) in level.iter().zip(coeffs) {
                let norm = w.squared_norm();
                for &v in &w.positive {
                    x[v] += c / norm;
                }
                for &v in &w.negative {
                    x[v] -= c / norm;
                }
            }
        }
        x
    }
}

/// Order-0 route: `S_J x(n, 0)` as plain sums over the level-`J` sets.
pub fn order0_oracle(x: &[f64], basis: &HaarBasis) -> Vec<f64> {
    basis
        .indicators()
        .iter()
        .map(|s| s.iter().map(|&v| x[v]).sum())
        .collect()
}

/// Order-1 route: `S_J x(n, 2^(J-j1))` as sums of absolute wavelet
/// coefficients at scale `j1` inside each level-`J` set; `1 ≤ j1 ≤ J`.
pub fn order1_oracle(x: &[f64], basis: &HaarBasis, j1: usize) -> Result<Vec<f64>> {
    cascade_oracle(x, basis, &[j1])
}

/// General cascade route for a coefficient with scale sequence
/// `j_1 < … < j_m`: alternate sparse wavelet analysis, absolute value,
/// and piecewise-constant extension, then pool by level-`J` set. An empty
/// sequence reduces to the order-0 route.
pub fn cascade_oracle(x: &[f64], basis: &HaarBasis, scales: &[usize]) -> Result<Vec<f64>> {
    for (i, &j) in scales.iter().enumerate() {
        let ascending = i == 0 || scales[i - 1] < j;
        if j == 0 || j > basis.depth() || !ascending {
            return Err(Error::InvalidConfig(format!(
                "scale sequence {scales:?} must be strictly increasing within 1..={}",
                basis.depth()
            )));
        }
    }
    if scales.is_empty() {
        return Ok(order0_oracle(x, basis));
    }
    let multires = &basis.multires;
    // Extended map: starts as x itself, then constant on ever-coarser
    // sets. The piecewise-constant extension repeats each level-j value
    // over all 2^j vertices of its set, so the next inner product picks
    // up that redundancy; divide it back out at every stage.
    let mut extended = x.to_vec();
    let mut amplitudes = Vec::new();
    let mut previous_scale = 0usize;
    for &j in scales {
        let redundancy = (1usize << previous_scale) as f64;
        let level = basis.wavelets_at(j);
        amplitudes = level
            .iter()
            .map(|w| (w.inner(&extended) / redundancy).abs())
            .collect();
        for (w, &a) in level.iter().zip(&amplitudes) {
            for &v in w.positive.iter().chain(&w.negative) {
                extended[v] = a;
            }
        }
        previous_scale = j;
    }
    let last = *scales.last().expect("nonempty");
    let top_nodes = multires.d() >> basis.depth();
    let mut out = vec![0.0; top_nodes];
    for (p, &a) in amplitudes.iter().enumerate() {
        out[multires.ancestor(last, p, basis.depth())] += a;
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::multires::{MultiresApprox, Pairing};
    use crate::scattering::{order_of, transform};

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
    fn classic_haar_on_two_vertices() {
        let m = MultiresApprox::build_from_pairings(2, vec![Pairing::new(vec![(0, 1)], 2).unwrap()])
            .unwrap();
        let basis = build_basis(&m, 1).unwrap();
        assert_eq!(basis.dense_vectors(), vec![vec![1.0, 1.0], vec![1.0, -1.0]]);
    }

    #[test]
    fn gram_matrix_is_diagonal_with_set_sizes() {
        let basis = build_basis(&standard_multires_4(), 2).unwrap();
        let vectors = basis.dense_vectors();
        assert_eq!(vectors.len(), 4);
        let mut diagonal = Vec::new();
        for (i, u) in vectors.iter().enumerate() {
            for (k, v) in vectors.iter().enumerate() {
                let dot: f64 = u.iter().zip(v).map(|(a, b)| a * b).sum();
                if i == k {
                    diagonal.push(dot);
                } else {
                    assert_eq!(dot, 0.0, "off-diagonal ({i},{k})");
                }
            }
        }
        assert_eq!(diagonal, vec![4.0, 2.0, 2.0, 4.0]);
    }

    #[test]
    fn order0_matches_direct_sum() {
        let basis = build_basis(&standard_multires_4(), 2).unwrap();
        assert_eq!(order0_oracle(&[1.0, 2.0, 3.0, 4.0], &basis), vec![10.0]);
        assert_eq!(order0_oracle(&[1.5; 4], &basis), vec![6.0]);
    }

    #[test]
    fn order1_hand_value() {
        let basis = build_basis(&standard_multires_4(), 2).unwrap();
        assert_eq!(order1_oracle(&[1.0, 2.0, 3.0, 4.0], &basis, 1).unwrap(), vec![2.0]);
        assert_eq!(order1_oracle(&[5.0; 4], &basis, 1).unwrap(), vec![0.0]);
        assert!(order1_oracle(&[0.0; 4], &basis, 0).is_err());
    }

    #[test]
    fn cascade_oracle_rejects_bad_scales() {
        let basis = build_basis(&standard_multires_4(), 2).unwrap();
        assert!(cascade_oracle(&[0.0; 4], &basis, &[2, 1]).is_err());
        assert!(cascade_oracle(&[0.0; 4], &basis, &[0]).is_err());
        assert!(cascade_oracle(&[0.0; 4], &basis, &[3]).is_err());
    }

    #[test]
    fn cascade_matches_transform_exhaustively() {
        let m = standard_multires_4();
        let basis = build_basis(&m, 2).unwrap();
        let x = [0.3, -1.2, 2.7, 0.9];
        let layers = transform(&x, &m, 2).unwrap();
        let top = &layers[2];
        for q in 0..4 {
            let scales = order_of(q, 2).unwrap().scales;
            let oracle = cascade_oracle(&x, &basis, &scales).unwrap();
            for n in 0..top.rows() {
                assert!(
                    (oracle[n] - top.get(n, q)).abs() <= 1e-12,
                    "q={q} n={n}: {} vs {}",
                    oracle[n],
                    top.get(n, q)
                );
            }
        }
    }

    #[test]
    fn synthesis_inverts_analysis() {
        let m = standard_multires_4();
        let basis = build_basis(&m, 2).unwrap();
        let x = [0.25, -3.5, 1.0, 9.75];
        let (ind, wav) = basis.analyze(&x);
        let back = basis.synthesize(&ind, &wav);
        for (a, b) in x.iter().zip(&back) {
            assert!((a - b).abs() < 1e-12);
        }
    }
}
