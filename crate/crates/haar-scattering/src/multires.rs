//! Multiresolution approximations of a vertex set.
//!
//! A multiresolution approximation is a sequence of pairings that merges
//! `d` vertices into nested sets: level `j` partitions the vertex set into
//! `d / 2^j` sets of size `2^j`, and each level-`j+1` set is the union of
//! the two level-`j` sets matched by the level-`j` pairing. Known-geometry
//! constructions for image grids and connectivity scoring against a ground
//! truth graph live here as well.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// An unweighted, undirected graph without self-loops.
///
/// Vertices are `0..vertex_count`; edges are stored normalized as
/// `(min, max)` pairs.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Graph {
    vertex_count: usize,
    edges: BTreeSet<(usize, usize)>,
    adjacency: Vec<Vec<usize>>,
}

impl Graph {
    pub fn new(vertex_count: usize, edges: impl IntoIterator<Item = (usize, usize)>) -> Result<Self> {
        let mut set = BTreeSet::new();
        let mut adjacency = vec![Vec::new(); vertex_count];
        for (u, v) in edges {
            if u == v || u >= vertex_count || v >= vertex_count {
                return Err(Error::InvalidEdge(u, v));
            }
            if set.insert((u.min(v), u.max(v))) {
                adjacency[u].push(v);
                adjacency[v].push(u);
            }
        }
        for n in &mut adjacency {
            n.sort_unstable();
        }
        Ok(Graph {
            vertex_count,
            edges: set,
            adjacency,
        })
    }

    pub fn vertex_count(&self) -> usize {
        self.vertex_count
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.edges.iter().copied()
    }

    pub fn has_edge(&self, u: usize, v: usize) -> bool {
        self.edges.contains(&(u.min(v), u.max(v)))
    }

    pub fn neighbors(&self, v: usize) -> &[usize] {
        &self.adjacency[v]
    }

    pub fn degree(&self, v: usize) -> usize {
        self.adjacency[v].len()
    }

    /// Whether the subgraph induced by `vertices` is connected.
    ///
    /// Empty and singleton sets count as connected.
    pub fn is_connected_subset(&self, vertices: &[usize]) -> bool {
        if vertices.len() <= 1 {
            return true;
        }
        let member: BTreeSet<usize> = vertices.iter().copied().collect();
        let start = vertices[0];
        let mut seen = BTreeSet::new();
        let mut stack = vec![start];
        seen.insert(start);
        while let Some(v) = stack.pop() {
            for &w in self.neighbors(v) {
                if member.contains(&w) && seen.insert(w) {
                    stack.push(w);
                }
            }
        }
        seen.len() == member.len()
    }

    /// Whether the whole graph is connected (false for an empty graph).
    pub fn is_connected(&self) -> bool {
        let all: Vec<usize> = (0..self.vertex_count).collect();
        !all.is_empty() && self.is_connected_subset(&all)
    }
}

/// A perfect matching of `0..node_count`; each pair is stored as
/// `(min, max)` and the position of a pair in the sequence is the node
/// index the merged pair receives at the next level.
///
/// Constructions in this crate emit pairs sorted by first index; pair
/// order is otherwise preserved because it carries the node numbering
/// (relabeling a multiresolution must not renumber nodes).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Pairing {
    pairs: Vec<(usize, usize)>,
}

impl Pairing {
    /// Validate a pairing of `node_count` nodes, keeping pair order.
    pub fn new(pairs: Vec<(usize, usize)>, node_count: usize) -> Result<Self> {
        if node_count % 2 != 0 || pairs.len() * 2 != node_count {
            return Err(Error::InvalidPairing {
                expected: node_count,
                reason: format!("{} pairs over {} nodes", pairs.len(), node_count),
            });
        }
        let mut seen = vec![false; node_count];
        let mut canon = Vec::with_capacity(pairs.len());
        for (a, b) in pairs {
            if a == b || a >= node_count || b >= node_count {
                return Err(Error::InvalidPairing {
                    expected: node_count,
                    reason: format!("bad pair ({a}, {b})"),
                });
            }
            if seen[a] || seen[b] {
                return Err(Error::InvalidPairing {
                    expected: node_count,
                    reason: format!("index {} matched twice", if seen[a] { a } else { b }),
                });
            }
            seen[a] = true;
            seen[b] = true;
            canon.push((a.min(b), a.max(b)));
        }
        Ok(Pairing { pairs: canon })
    }

    pub fn node_count(&self) -> usize {
        self.pairs.len() * 2
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    pub fn pairs(&self) -> &[(usize, usize)] {
        &self.pairs
    }

    pub fn pair(&self, n: usize) -> (usize, usize) {
        self.pairs[n]
    }
}

/// Canonicalize raw merge pairs and report, for each raw pair, the node
/// index it receives after sorting. Constructions that decide upper-level
/// pairings in terms of their own merge order use the returned ranks to
/// express those levels over canonical node indices.
fn canonicalize_merges(raw: &[(usize, usize)], node_count: usize) -> Result<(Pairing, Vec<usize>)> {
    let normalized: Vec<(usize, usize)> = raw.iter().map(|&(a, b)| (a.min(b), a.max(b))).collect();
    let mut sorted = normalized.clone();
    sorted.sort_unstable();
    let pairing = Pairing::new(sorted.clone(), node_count)?;
    let mut rank = vec![0usize; raw.len()];
    for (k, p) in normalized.iter().enumerate() {
        rank[k] = sorted.binary_search(p).expect("pair vanished during sort");
    }
    Ok((pairing, rank))
}

/// Multiresolution approximation of `{0, …, d-1}`: one pairing per level
/// plus the derived vertex sets.
#[derive(Debug, Clone, PartialEq)]
pub struct MultiresApprox {
    d: usize,
    pairings: Vec<Pairing>,
    /// `levels[j][n]` is the sorted vertex set of node `n` at level `j`;
    /// level 0 holds singletons.
    levels: Vec<Vec<Vec<usize>>>,
    /// `parent[j][n]` is the level-`j+1` node containing level-`j` node `n`.
    parent: Vec<Vec<usize>>,
}

#[derive(Serialize, Deserialize)]
struct MultiresJson {
    d: usize,
    #[serde(rename = "J")]
    depth: usize,
    pairings: Vec<Pairing>,
}

impl MultiresApprox {
    /// Derive the vertex-set hierarchy from per-level pairings.
    ///
    /// `pairings[j]` must match `d / 2^j` nodes, with indices referring to
    /// the canonical (sorted) node order of level `j`.
    pub fn build_from_pairings(d: usize, pairings: Vec<Pairing>) -> Result<Self> {
        if d == 0 || !d.is_power_of_two() {
            return Err(Error::NotPowerOfTwo(d));
        }
        if pairings.len() > d.trailing_zeros() as usize {
            return Err(Error::DepthTooLarge {
                requested: pairings.len(),
                max: d.trailing_zeros() as usize,
            });
        }
        let mut levels: Vec<Vec<Vec<usize>>> = vec![(0..d).map(|v| vec![v]).collect()];
        let mut parent = Vec::new();
        for (j, pairing) in pairings.iter().enumerate() {
            let nodes = d >> j;
            if pairing.node_count() != nodes {
                return Err(Error::LevelSizeMismatch {
                    level: j,
                    got: pairing.node_count(),
                    expected: nodes,
                });
            }
            let prev = &levels[j];
            let mut next = Vec::with_capacity(nodes / 2);
            let mut par = vec![0usize; nodes];
            for (n, &(a, b)) in pairing.pairs().iter().enumerate() {
                let mut merged = prev[a].clone();
                merged.extend_from_slice(&prev[b]);
                merged.sort_unstable();
                next.push(merged);
                par[a] = n;
                par[b] = n;
            }
            parent.push(par);
            levels.push(next);
        }
        Ok(MultiresApprox {
            d,
            pairings,
            levels,
            parent,
        })
    }

    pub fn d(&self) -> usize {
        self.d
    }

    /// Number of pairing levels (the depth J).
    pub fn depth(&self) -> usize {
        self.pairings.len()
    }

    pub fn pairings(&self) -> &[Pairing] {
        &self.pairings
    }

    pub fn pairing(&self, level: usize) -> &Pairing {
        &self.pairings[level]
    }

    /// Vertex sets `V_{j,n}` at level `j`, each sorted ascending.
    pub fn vertex_sets(&self, level: usize) -> &[Vec<usize>] {
        &self.levels[level]
    }

    /// The level-`to` node whose set contains level-`from` node `n`.
    pub fn ancestor(&self, from: usize, n: usize, to: usize) -> usize {
        assert!(from <= to && to <= self.depth());
        let mut node = n;
        for j in from..to {
            node = self.parent[j][node];
        }
        node
    }

    /// Relabel level-0 vertices: vertex `v` becomes `map[v]`.
    ///
    /// `map` must be a bijection on `0..d`. Pair order (and therefore the
    /// node numbering of every level) is preserved, so the relabeled
    /// multiresolution computes bit-identical scattering layers on
    /// correspondingly relabeled signals.
    pub fn relabel(&self, map: &[usize]) -> Result<Self> {
        if map.len() != self.d {
            return Err(Error::VertexCountMismatch {
                multires: self.d,
                graph: map.len(),
            });
        }
        let mut pairings = Vec::with_capacity(self.depth());
        pairings.push(Pairing::new(
            self.pairings[0]
                .pairs()
                .iter()
                .map(|&(a, b)| (map[a], map[b]))
                .collect(),
            self.d,
        )?);
        pairings.extend(self.pairings[1..].iter().cloned());
        Self::build_from_pairings(self.d, pairings)
    }

    /// Serialize to the on-disk JSON document
    /// `{"d": …, "J": …, "pairings": [[[a,b],…],…]}` with levels listed
    /// finest first and pairs sorted by first index.
    pub fn to_json(&self) -> serde_json::Value {
        serde_json::to_value(MultiresJson {
            d: self.d,
            depth: self.depth(),
            pairings: self.pairings.clone(),
        })
        .expect("multiresolution serialization cannot fail")
    }

    pub fn to_json_string(&self) -> String {
        serde_json::to_string_pretty(&self.to_json()).expect("serialization cannot fail")
    }

    pub fn from_json(value: &serde_json::Value) -> Result<Self> {
        let doc: MultiresJson = serde_json::from_value(value.clone())?;
        if doc.pairings.len() != doc.depth {
            return Err(Error::DepthTooLarge {
                requested: doc.depth,
                max: doc.pairings.len(),
            });
        }
        let mut validated = Vec::with_capacity(doc.pairings.len());
        for (j, p) in doc.pairings.into_iter().enumerate() {
            validated.push(Pairing::new(p.pairs, doc.d >> j)?);
        }
        Self::build_from_pairings(doc.d, validated)
    }

    pub fn from_json_str(text: &str) -> Result<Self> {
        Self::from_json(&serde_json::from_str(text)?)
    }
}

/// Fraction of vertex sets at each level `0..=J` that induce a connected
/// subgraph of `graph`.
///
/// When `active` is given, sets are first restricted to active vertices;
/// restricted sets that become empty are skipped (they carry no geometric
/// information) and singletons count as connected. Levels where every set
/// is skipped score 1.0.
pub fn connectivity_fraction(
    multires: &MultiresApprox,
    graph: &Graph,
    active: Option<&[bool]>,
) -> Result<Vec<f64>> {
    if graph.vertex_count() != multires.d() {
        return Err(Error::VertexCountMismatch {
            multires: multires.d(),
            graph: graph.vertex_count(),
        });
    }
    if let Some(mask) = active {
        if mask.len() != multires.d() {
            return Err(Error::VertexCountMismatch {
                multires: multires.d(),
                graph: mask.len(),
            });
        }
    }
    let mut fractions = Vec::with_capacity(multires.depth() + 1);
    for j in 0..=multires.depth() {
        let mut counted = 0usize;
        let mut connected = 0usize;
        for set in multires.vertex_sets(j) {
            let restricted: Vec<usize> = match active {
                Some(mask) => set.iter().copied().filter(|&v| mask[v]).collect(),
                None => set.clone(),
            };
            if restricted.is_empty() {
                continue;
            }
            counted += 1;
            if graph.is_connected_subset(&restricted) {
                connected += 1;
            }
        }
        fractions.push(if counted == 0 {
            1.0
        } else {
            connected as f64 / counted as f64
        });
    }
    Ok(fractions)
}

// ---------------------------------------------------------------------------
// Image-grid constructions
// ---------------------------------------------------------------------------

/// Pixel order of the rotated `width × height` frame: entry `i` of the
/// returned vector is the original row-major pixel index sitting at
/// position `i` (row-major) of the rotated frame, whose dimensions are
/// also returned.
fn rotated_frame(width: usize, height: usize, rot: usize) -> (usize, usize, Vec<usize>) {
    let (w2, h2) = if rot % 2 == 0 {
        (width, height)
    } else {
        (height, width)
    };
    let mut map = Vec::with_capacity(width * height);
    for r in 0..h2 {
        for c in 0..w2 {
            // Inverse of the clockwise rotation taking the original frame
            // to the rotated one.
            let (orig_r, orig_c) = match rot % 4 {
                0 => (r, c),
                1 => (height - 1 - c, r),
                2 => (height - 1 - r, width - 1 - c),
                _ => (c, width - 1 - r),
            };
            map.push(orig_r * width + orig_c);
        }
    }
    (w2, h2, map)
}

/// Classic block pairings of a `bw × bh` frame: pair horizontally at even
/// levels and vertically at odd levels, falling back to the other axis
/// once one is exhausted. Level-0 node `(r, c)` is `frame[r*bw + c]`.
fn classic_grid_pairings(bw0: usize, bh0: usize, depth: usize, frame: &[usize]) -> Result<Vec<Pairing>> {
    let mut bw = bw0;
    let mut bh = bh0;
    // rank[r*bw + c] = canonical node index of the block at (r, c)
    let mut rank: Vec<usize> = frame.to_vec();
    let mut pairings = Vec::with_capacity(depth);
    for j in 0..depth {
        let horizontal = if bw == 1 {
            false
        } else if bh == 1 {
            true
        } else {
            j % 2 == 0
        };
        let mut raw = Vec::with_capacity(bw * bh / 2);
        if horizontal {
            for r in 0..bh {
                for c in 0..bw / 2 {
                    raw.push((rank[r * bw + 2 * c], rank[r * bw + 2 * c + 1]));
                }
            }
            bw /= 2;
        } else {
            for r in 0..bh / 2 {
                for c in 0..bw {
                    raw.push((rank[2 * r * bw + c], rank[(2 * r + 1) * bw + c]));
                }
            }
            bh /= 2;
        }
        let (pairing, new_rank) = canonicalize_merges(&raw, raw.len() * 2)?;
        pairings.push(pairing);
        rank = new_rank;
    }
    Ok(pairings)
}

/// Boustrophedon Hamiltonian cycle of a `bw × bh` frame (both ≥ 2):
/// row 0 left to right, rows below snake through columns `1..bw`, return
/// along column 0. Consecutive positions, including the wrap-around, are
/// 4-neighbors. Degenerate strips fall back to plain row-major order.
fn serpentine_cycle(bw: usize, bh: usize) -> Vec<(usize, usize)> {
    if bw < 2 || bh < 2 {
        let mut path = Vec::with_capacity(bw * bh);
        for r in 0..bh {
            for c in 0..bw {
                path.push((r, c));
            }
        }
        return path;
    }
    let mut cycle = Vec::with_capacity(bw * bh);
    for c in 0..bw {
        cycle.push((0, c));
    }
    for r in 1..bh {
        if r % 2 == 1 {
            for c in (1..bw).rev() {
                cycle.push((r, c));
            }
        } else {
            for c in 1..bw {
                cycle.push((r, c));
            }
        }
    }
    for r in (1..bh).rev() {
        cycle.push((r, 0));
    }
    cycle
}

/// Pairings that merge consecutive arcs of a vertex order cyclically;
/// every level-`j` set is a contiguous arc of `order`, hence connected
/// whenever consecutive entries (and the wrap-around) are neighbors.
fn cycle_arc_pairings(order: &[usize], depth: usize) -> Result<Vec<Pairing>> {
    let mut rank: Vec<usize> = order.to_vec();
    let mut pairings = Vec::with_capacity(depth);
    for _ in 0..depth {
        let half = rank.len() / 2;
        let mut raw = Vec::with_capacity(half);
        for k in 0..half {
            raw.push((rank[2 * k], rank[2 * k + 1]));
        }
        let (pairing, new_rank) = canonicalize_merges(&raw, rank.len())?;
        pairings.push(pairing);
        rank = new_rank;
    }
    Ok(pairings)
}

/// Connected multiresolution approximations of a `width × height` pixel
/// grid, every set connected under 8-neighbor adjacency.
///
/// `variant` decodes as `(shift, rotation) = (variant / 4, variant % 4)`.
/// Rotation builds the hierarchy on the 90°-rotated frame, which swaps the
/// roles of the horizontal and vertical merge levels. Shift 0 is the block
/// construction (horizontal dominoes first, then vertical merges, and so
/// on); shifts `s ≥ 1` merge consecutive arcs of a closed serpentine
/// traversal offset by `s`, which keeps every set connected at every
/// level. Square grids use variants `0..64` as their canonical family.
pub fn grid_multires(width: usize, height: usize, depth: usize, variant: usize) -> Result<MultiresApprox> {
    let d = width * height;
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
    let rot = variant % 4;
    let shift = variant / 4;
    if shift >= d {
        return Err(Error::VariantOutOfRange {
            variant,
            max: 4 * d,
        });
    }
    let (w2, h2, frame) = rotated_frame(width, height, rot);
    let pairings = if shift == 0 || w2 < 2 || h2 < 2 {
        classic_grid_pairings(w2, h2, depth, &frame)?
    } else {
        let cycle = serpentine_cycle(w2, h2);
        let n = cycle.len();
        let order: Vec<usize> = (0..n)
            .map(|i| {
                let (r, c) = cycle[(i + shift) % n];
                frame[r * w2 + c]
            })
            .collect();
        cycle_arc_pairings(&order, depth)?
    };
    MultiresApprox::build_from_pairings(d, pairings)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::datasets::grid_graph;

    fn pairing(pairs: &[(usize, usize)], nodes: usize) -> Pairing {
        Pairing::new(pairs.to_vec(), nodes).unwrap()
    }

    #[test]
    fn single_pair_multires() {
        let m = MultiresApprox::build_from_pairings(2, vec![pairing(&[(0, 1)], 2)]).unwrap();
        assert_eq!(m.vertex_sets(1), &[vec![0, 1]]);
    }

    #[test]
    fn full_merge_of_four() {
        let m = MultiresApprox::build_from_pairings(
            4,
            vec![pairing(&[(0, 1), (2, 3)], 4), pairing(&[(0, 1)], 2)],
        )
        .unwrap();
        assert_eq!(m.vertex_sets(1), &[vec![0, 1], vec![2, 3]]);
        assert_eq!(m.vertex_sets(2), &[vec![0, 1, 2, 3]]);
    }

    #[test]
    fn repeated_index_rejected() {
        let err = Pairing::new(vec![(0, 1), (1, 2)], 4).unwrap_err();
        assert!(matches!(err, Error::InvalidPairing { .. }));
    }

    #[test]
    fn non_power_of_two_rejected() {
        assert!(matches!(
            MultiresApprox::build_from_pairings(6, vec![]),
            Err(Error::NotPowerOfTwo(6))
        ));
    }

    #[test]
    fn wrong_level_size_rejected() {
        let err = MultiresApprox::build_from_pairings(4, vec![pairing(&[(0, 1)], 2)]).unwrap_err();
        assert!(matches!(err, Error::LevelSizeMismatch { level: 0, .. }));
    }

    #[test]
    fn partition_and_nesting_invariants() {
        let m = grid_multires(4, 4, 4, 7).unwrap();
        for j in 0..=m.depth() {
            let sets = m.vertex_sets(j);
            let mut all: Vec<usize> = sets.iter().flatten().copied().collect();
            all.sort_unstable();
            assert_eq!(all, (0..16).collect::<Vec<_>>(), "level {j} must partition");
            for set in sets {
                assert_eq!(set.len(), 1 << j);
            }
        }
        for j in 0..m.depth() {
            for (n, &(a, b)) in m.pairing(j).pairs().iter().enumerate() {
                let mut union: Vec<usize> = m.vertex_sets(j)[a].clone();
                union.extend_from_slice(&m.vertex_sets(j)[b]);
                union.sort_unstable();
                assert_eq!(union, m.vertex_sets(j + 1)[n]);
            }
        }
    }

    #[test]
    fn grid_2x2_variant0_matches_block_pattern() {
        let m = grid_multires(2, 2, 2, 0).unwrap();
        // level-1 pairs are horizontal neighbors: {0,1} and {2,3}
        assert_eq!(m.vertex_sets(1), &[vec![0, 1], vec![2, 3]]);
        assert_eq!(m.vertex_sets(2), &[vec![0, 1, 2, 3]]);
    }

    #[test]
    fn grid_4x4_variant0_level1_all_horizontal() {
        let m = grid_multires(4, 4, 1, 0).unwrap();
        for &(a, b) in m.pairing(0).pairs() {
            assert_eq!(a / 4, b / 4, "pair ({a},{b}) must share a row");
            assert_eq!(a + 1, b, "pair ({a},{b}) must be horizontally adjacent");
        }
        assert_eq!(m.pairing(0).len(), 8);
    }

    #[test]
    fn grid_all_64_variants_fully_connected() {
        let g = grid_graph(4, 4);
        for variant in 0..64 {
            let m = grid_multires(4, 4, 4, variant).unwrap();
            let fractions = connectivity_fraction(&m, &g, None).unwrap();
            for (j, f) in fractions.iter().enumerate() {
                assert_eq!(*f, 1.0, "variant {variant} level {j} not fully connected");
            }
        }
    }

    #[test]
    fn larger_grid_variants_fully_connected() {
        for variant in [0, 1, 5, 21, 63] {
            let m = grid_multires(8, 8, 6, variant).unwrap();
            let g = grid_graph(8, 8);
            let fractions = connectivity_fraction(&m, &g, None).unwrap();
            assert!(fractions.iter().all(|&f| f == 1.0), "variant {variant}");
        }
    }

    #[test]
    fn non_square_grid_variants_stay_connected() {
        let g = grid_graph(8, 2);
        for variant in 0..32 {
            let m = grid_multires(8, 2, 4, variant).unwrap();
            let fractions = connectivity_fraction(&m, &g, None).unwrap();
            assert!(
                fractions.iter().all(|&f| f == 1.0),
                "8x2 variant {variant}: {fractions:?}"
            );
        }
        // Strips fall back to the block construction for every variant.
        let strip = grid_graph(8, 1);
        let m = grid_multires(8, 1, 3, 5).unwrap();
        let fractions = connectivity_fraction(&m, &strip, None).unwrap();
        assert!(fractions.iter().all(|&f| f == 1.0));
    }

    #[test]
    fn connectivity_counts_disconnected_sets() {
        // Pair opposite corners of a 2x2 grid: {0,3} and {1,2} are both
        // diagonal, which 8-adjacency does connect; use a 1x4 strip instead.
        let g = grid_graph(4, 1);
        let m = MultiresApprox::build_from_pairings(4, vec![pairing(&[(0, 2), (1, 3)], 4)]).unwrap();
        let fractions = connectivity_fraction(&m, &g, None).unwrap();
        assert_eq!(fractions[0], 1.0); // singletons
        assert_eq!(fractions[1], 0.0); // {0,2} and {1,3} are not adjacent on a path
    }

    #[test]
    fn random_pairing_fraction_matches_adjacency_count() {
        // On a 4x4 grid, the level-1 connected fraction of a random
        // pairing is the number of 8-adjacent pairs over 8.
        use rand::seq::SliceRandom;
        use rand::SeedableRng;
        let g = grid_graph(4, 4);
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(77);
        for _ in 0..20 {
            let mut order: Vec<usize> = (0..16).collect();
            order.shuffle(&mut rng);
            let pairs: Vec<(usize, usize)> =
                (0..8).map(|k| (order[2 * k], order[2 * k + 1])).collect();
            let adjacent = pairs.iter().filter(|&&(a, b)| g.has_edge(a, b)).count();
            let m =
                MultiresApprox::build_from_pairings(16, vec![pairing(&pairs, 16)]).unwrap();
            let fractions = connectivity_fraction(&m, &g, None).unwrap();
            assert_eq!(fractions[1], adjacent as f64 / 8.0);
        }
    }

    #[test]
    fn connectivity_with_active_mask() {
        let g = grid_graph(4, 1);
        let m = MultiresApprox::build_from_pairings(4, vec![pairing(&[(0, 2), (1, 3)], 4)]).unwrap();
        // Only vertex per set active: singletons are connected.
        let active = vec![true, true, false, false];
        let fractions = connectivity_fraction(&m, &g, Some(&active)).unwrap();
        assert_eq!(fractions[1], 1.0);
    }

    #[test]
    fn json_round_trip() {
        let m = grid_multires(4, 4, 3, 9).unwrap();
        let text = m.to_json_string();
        let back = MultiresApprox::from_json_str(&text).unwrap();
        assert_eq!(m, back);
        let value = m.to_json();
        assert_eq!(value["d"], 16);
        assert_eq!(value["J"], 3);
        assert_eq!(value["pairings"].as_array().unwrap().len(), 3);
    }

    #[test]
    fn relabel_round_trip() {
        let m = grid_multires(4, 4, 4, 0).unwrap();
        let map: Vec<usize> = (0..16).map(|v| (v * 7 + 3) % 16).collect();
        let relabeled = m.relabel(&map).unwrap();
        let mut inverse = vec![0usize; 16];
        for (v, &t) in map.iter().enumerate() {
            inverse[t] = v;
        }
        assert_eq!(relabeled.relabel(&inverse).unwrap(), m);
        // Sets map through the relabeling.
        for j in 0..=4 {
            let mut expect: Vec<Vec<usize>> = m
                .vertex_sets(j)
                .iter()
                .map(|s| {
                    let mut t: Vec<usize> = s.iter().map(|&v| map[v]).collect();
                    t.sort_unstable();
                    t
                })
                .collect();
            expect.sort();
            let mut got = relabeled.vertex_sets(j).to_vec();
            got.sort();
            assert_eq!(got, expect, "level {j}");
        }
    }

    #[test]
    fn rotated_frame_is_bijective() {
        for rot in 0..4 {
            let (w2, h2, map) = rotated_frame(4, 2, rot);
            assert_eq!(w2 * h2, 8);
            let mut seen = vec![false; 8];
            for &i in &map {
                assert!(!seen[i]);
                seen[i] = true;
            }
        }
    }

    #[test]
    fn serpentine_cycle_is_hamiltonian_and_closed() {
        for (w, h) in [(2, 2), (4, 4), (8, 4), (2, 8)] {
            let cycle = serpentine_cycle(w, h);
            assert_eq!(cycle.len(), w * h);
            for i in 0..cycle.len() {
                let (r1, c1) = cycle[i];
                let (r2, c2) = cycle[(i + 1) % cycle.len()];
                let dr = r1.abs_diff(r2);
                let dc = c1.abs_diff(c2);
                assert!(dr + dc == 1, "({w},{h}) step {i}: ({r1},{c1})->({r2},{c2})");
            }
        }
    }
}
