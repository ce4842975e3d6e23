//! Inversion of the scattering transform from interlaced multiresolution
//! families.
//!
//! A single cascade loses the order of each matched pair. Two pairings of
//! the same nodes are *interlaced* when no proper nonempty subset is
//! closed under both, which makes their union one Hamiltonian cycle; a
//! layer computed under both pairings can then be inverted by walking
//! that cycle and propagating values. A family of `2^J` members, one per
//! choice of pairing at each level, lets the walk run at every level from
//! coarse to fine and recover the signal exactly for generic inputs.
//!
//! Local inversions are not always decisive: a full-depth top layer has
//! one row and an uninformative final pairing, and mid-tower layers can
//! admit whole alternative explanations that only contradict the data of
//! some *other* member further down. [`reconstruct`] therefore carries a
//! small set of surviving candidates per prefix and column and lets the
//! sibling cross-checks prune them during the descent. At full depth the
//! pruning necessarily ends with two candidates — the signal and its
//! reflection through half the total sum produce identical outputs under
//! every multiresolution — and that pair is reported as ambiguous.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::multires::{MultiresApprox, Pairing};
use crate::scattering::{transform, ScatteringTensor};

/// Relative tolerance for value-equality decisions during propagation.
const WALK_TOL: f64 = 1e-9;

#[inline]
fn close(a: f64, b: f64) -> bool {
    (a - b).abs() <= WALK_TOL * a.abs().max(b.abs()).max(1.0)
}

/// Whether two pairings of the same node set are interlaced: their union
/// multigraph is a single cycle through every node, equivalently no
/// proper nonempty subset is closed under both pairings.
pub fn is_interlaced(p0: &Pairing, p1: &Pairing) -> Result<bool> {
    if p0.node_count() != p1.node_count() {
        return Err(Error::PairingSizeMismatch(p0.node_count(), p1.node_count()));
    }
    let n = p0.node_count();
    if n == 0 {
        return Ok(false);
    }
    // Union of two perfect matchings: every vertex has degree 2, so the
    // union is a disjoint set of cycles; interlaced means one cycle.
    let mut partner0 = vec![0usize; n];
    let mut partner1 = vec![0usize; n];
    for &(a, b) in p0.pairs() {
        partner0[a] = b;
        partner0[b] = a;
    }
    for &(a, b) in p1.pairs() {
        partner1[a] = b;
        partner1[b] = a;
    }
    let mut seen = vec![false; n];
    let mut count = 0usize;
    let mut v = 0usize;
    let mut use_first = true;
    loop {
        if seen[v] {
            break;
        }
        seen[v] = true;
        count += 1;
        v = if use_first { partner0[v] } else { partner1[v] };
        use_first = !use_first;
    }
    Ok(count == n)
}

/// A family of `2^J` multiresolutions: member `m` uses pairing
/// `π_j^{ε_j}` at level `j`, where `ε_j` is bit `j` of `m`.
#[derive(Debug, Clone)]
pub struct InterlacedFamily {
    d: usize,
    depth: usize,
    level_pairs: Vec<(Pairing, Pairing)>,
    members: Vec<MultiresApprox>,
}

impl InterlacedFamily {
    /// Build a family from per-level pairing pairs, verifying interlacing
    /// at every level.
    pub fn new(d: usize, level_pairs: Vec<(Pairing, Pairing)>) -> Result<Self> {
        if d == 0 || !d.is_power_of_two() {
            return Err(Error::NotPowerOfTwo(d));
        }
        let depth = level_pairs.len();
        if depth > d.trailing_zeros() as usize {
            return Err(Error::DepthTooLarge {
                requested: depth,
                max: d.trailing_zeros() as usize,
            });
        }
        for (j, (p0, p1)) in level_pairs.iter().enumerate() {
            let nodes = d >> j;
            if p0.node_count() != nodes || p1.node_count() != nodes {
                return Err(Error::LevelSizeMismatch {
                    level: j,
                    got: p0.node_count(),
                    expected: nodes,
                });
            }
            if !is_interlaced(p0, p1)? {
                return Err(Error::NotInterlaced);
            }
        }
        let members: Result<Vec<MultiresApprox>> = (0..1usize << depth)
            .map(|m| {
                let pairings: Vec<Pairing> = (0..depth)
                    .map(|j| {
                        if m >> j & 1 == 0 {
                            level_pairs[j].0.clone()
                        } else {
                            level_pairs[j].1.clone()
                        }
                    })
                    .collect();
                MultiresApprox::build_from_pairings(d, pairings)
            })
            .collect();
        Ok(InterlacedFamily {
            d,
            depth,
            level_pairs,
            members: members?,
        })
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn depth(&self) -> usize {
        self.depth
    }

    pub fn member_count(&self) -> usize {
        1 << self.depth
    }

    pub fn member(&self, index: usize) -> &MultiresApprox {
        &self.members[index]
    }

    pub fn members(&self) -> &[MultiresApprox] {
        &self.members
    }

    pub fn level_pair(&self, level: usize) -> (&Pairing, &Pairing) {
        (&self.level_pairs[level].0, &self.level_pairs[level].1)
    }

    /// Top scattering layers of one signal under every member, indexed by
    /// member bits.
    pub fn transforms(&self, x: &[f64]) -> Result<Vec<ScatteringTensor>> {
        self.members
            .par_iter()
            .map(|m| Ok(transform(x, m, self.depth)?.pop().expect("depth+1 layers")))
            .collect()
    }
}

/// The cyclic-shift interlaced family: at each level with `d'` nodes,
/// `π^0` pairs `(2n, 2n+1)` and `π^1` pairs `(2n+1, (2n+2) mod d')`.
/// Both are interlaced at every level (they coincide at the final
/// two-node level, where only one pairing exists).
///
/// Reconstruction from the top layers is exact for generic signals at
/// partial depth (`2^J < d`). At full depth it is two-to-one for every
/// family: the reflection `x ↦ (Σx)/2^(J-1) - x` flips the sign of every
/// pairwise sum around the total and leaves every absolute difference
/// unchanged, so the single top row cannot tell the two signals apart.
/// `reconstruct` reports that case as ambiguous.
pub fn standard_interlaced_family(d: usize, depth: usize) -> Result<InterlacedFamily> {
    if d == 0 || !d.is_power_of_two() {
        return Err(Error::NotPowerOfTwo(d));
    }
    if depth > d.trailing_zeros() as usize {
        return Err(Error::DepthTooLarge {
            requested: depth,
            max: d.trailing_zeros() as usize,
        });
    }
    let mut level_pairs = Vec::with_capacity(depth);
    for j in 0..depth {
        let nodes = d >> j;
        let p0 = Pairing::new((0..nodes / 2).map(|n| (2 * n, 2 * n + 1)).collect(), nodes)?;
        let mut shifted: Vec<(usize, usize)> = (0..nodes / 2)
            .map(|n| {
                let (a, b) = (2 * n + 1, (2 * n + 2) % nodes);
                (a.min(b), a.max(b))
            })
            .collect();
        shifted.sort_unstable();
        let p1 = Pairing::new(shifted, nodes)?;
        level_pairs.push((p0, p1));
    }
    InterlacedFamily::new(d, level_pairs)
}

/// Unordered value pair carried by one matched edge of the union cycle.
#[derive(Debug, Clone, Copy)]
struct EdgeValues {
    u: usize,
    v: usize,
    hi: f64,
    lo: f64,
}

/// Recover the two values of a pair from `(sum, absdiff)`. Only a
/// negative magnitude is rejected: even-column entries of low layers are
/// signed (they are sums of raw signal values), so a magnitude exceeding
/// the sum is legitimate and the cycle walk is what rules out garbage.
fn pair_values(sum: f64, absdiff: f64) -> Option<(f64, f64)> {
    let scale = sum.abs().max(absdiff.abs()).max(1.0);
    if absdiff < -WALK_TOL * scale {
        return None;
    }
    Some(((sum + absdiff) / 2.0, (sum - absdiff) / 2.0))
}

/// All value assignments (one value per vertex) consistent with the
/// unordered pair carried by every edge. The union of two perfect
/// matchings has vertex degree 2, so components are cycles; each cycle is
/// walked under both seed hypotheses and the component survivors combine
/// multiplicatively, deduplicated and capped.
fn walk_survivors(n: usize, edges: &[EdgeValues], cap: usize) -> Vec<Vec<f64>> {
    let mut incident: Vec<Vec<usize>> = vec![Vec::new(); n];
    for (k, e) in edges.iter().enumerate() {
        incident[e.u].push(k);
        incident[e.v].push(k);
    }
    if incident.iter().any(|inc| inc.len() != 2) {
        return Vec::new();
    }
    let mut assignments: Vec<Vec<f64>> = vec![vec![0.0f64; n]];
    let mut visited = vec![false; n];
    for start in 0..n {
        if visited[start] {
            continue;
        }
        // Collect the component cycle as (vertex, outgoing edge) steps.
        let mut order = Vec::new();
        let mut v = start;
        let mut edge = incident[start][0];
        loop {
            visited[v] = true;
            order.push((v, edge));
            let e = &edges[edge];
            let next = if e.u == v { e.v } else { e.u };
            if next == start {
                break;
            }
            let inc = &incident[next];
            edge = if inc[0] == edge { inc[1] } else { inc[0] };
            v = next;
        }
        let first = &edges[order[0].1];
        let mut survivors: Vec<Vec<f64>> = Vec::new();
        let mut seeds = vec![first.hi];
        if !close(first.hi, first.lo) {
            seeds.push(first.lo);
        }
        'hypothesis: for seed in seeds {
            let mut assignment = vec![0.0f64; order.len()];
            assignment[0] = seed;
            let mut current = seed;
            for (i, &(_, edge)) in order.iter().enumerate() {
                let e = &edges[edge];
                let partner = if close(current, e.hi) {
                    e.lo
                } else if close(current, e.lo) {
                    e.hi
                } else {
                    continue 'hypothesis;
                };
                if i + 1 < order.len() {
                    assignment[i + 1] = partner;
                    current = partner;
                } else if !close(partner, seed) {
                    continue 'hypothesis;
                }
            }
            if !survivors
                .iter()
                .any(|s| s.iter().zip(&assignment).all(|(a, b)| close(*a, *b)))
            {
                survivors.push(assignment);
            }
        }
        if survivors.is_empty() {
            return Vec::new();
        }
        let mut extended = Vec::with_capacity(assignments.len() * survivors.len());
        for base in &assignments {
            for survivor in &survivors {
                if extended.len() >= cap {
                    break;
                }
                let mut next = base.clone();
                for (&(vertex, _), &value) in order.iter().zip(survivor) {
                    next[vertex] = value;
                }
                extended.push(next);
            }
        }
        assignments = extended;
    }
    assignments
}

/// Invert one cascade level: from the two sibling layers of a common
/// signal computed under interlaced pairings, recover the layer below.
///
/// Works column by column: each pair contributes an unordered value pair,
/// and the union cycle of the two pairings pins the locations. Fails with
/// `Ambiguous` when a column admits two consistent assignments (the
/// alternating two-value pattern; unavoidable when the layers carry too
/// few distinct values) and with `Inconsistent` when no assignment
/// explains both tensors.
pub fn invert_layer(
    s0: &ScatteringTensor,
    s1: &ScatteringTensor,
    p0: &Pairing,
    p1: &Pairing,
) -> Result<ScatteringTensor> {
    if !is_interlaced(p0, p1)? {
        return Err(Error::NotInterlaced);
    }
    if s0.level() != s1.level() || s0.level() == 0 || s0.rows() != s1.rows() {
        return Err(Error::BatchShapeMismatch);
    }
    let lower_level = s0.level() - 1;
    let n = p0.node_count();
    if s0.rows() * 2 != n {
        return Err(Error::LevelSizeMismatch {
            level: lower_level,
            got: s0.rows() * 2,
            expected: n,
        });
    }
    let lower_cols = s0.cols() / 2;
    let mut data = vec![0.0f64; n * lower_cols];
    for q in 0..lower_cols {
        let mut edges = Vec::with_capacity(n);
        for (tensor, pairing) in [(s0, p0), (s1, p1)] {
            for (row, &(a, b)) in pairing.pairs().iter().enumerate() {
                let (hi, lo) = pair_values(tensor.get(row, 2 * q), tensor.get(row, 2 * q + 1))
                    .ok_or(Error::Inconsistent { level: lower_level })?;
                edges.push(EdgeValues { u: a, v: b, hi, lo });
            }
        }
        let survivors = walk_survivors(n, &edges, 2);
        match survivors.len() {
            1 => {
                for v in 0..n {
                    data[v * lower_cols + q] = survivors[0][v];
                }
            }
            0 => return Err(Error::Inconsistent { level: lower_level }),
            _ => return Err(Error::Ambiguous { level: lower_level }),
        }
    }
    Ok(ScatteringTensor::new(lower_level, n, data))
}

/// Reconstruct the signal from the top layers of every family member
/// (indexed by member bits). Exact up to floating error for signals whose
/// intermediate layers are generic; degenerate signals surface as
/// `Ambiguous` with the failing level.
pub fn reconstruct(outputs: &[ScatteringTensor], family: &InterlacedFamily) -> Result<Vec<f64>> {
    const COLUMN_SET_CAP: usize = 64;
    let depth = family.depth();
    if outputs.len() != family.member_count() {
        return Err(Error::FamilySizeMismatch {
            expected: family.member_count(),
            got: outputs.len(),
        });
    }
    if depth == 0 {
        return Ok(outputs[0].data().to_vec());
    }
    let top_rows = family.d() >> depth;
    for t in outputs {
        if t.level() != depth || t.rows() != top_rows {
            return Err(Error::BatchShapeMismatch);
        }
    }
    // Per prefix and per column, the set of value assignments that is
    // still consistent with every member below that prefix. Alternatives
    // accumulate mid-tower: a full-depth top has one row and an
    // uninformative final pairing, so both placements of every recovered
    // pair survive, and whole fake columns can stay consistent with one
    // subtree; the cross-checks against the sibling prefix at each
    // descent prune them. Column sets that outgrow the cap mean
    // genuinely degenerate signals.
    let mut states: Vec<Vec<Vec<Vec<f64>>>> = outputs
        .iter()
        .map(|t| {
            (0..t.cols())
                .map(|q| vec![(0..t.rows()).map(|n| t.get(n, q)).collect::<Vec<f64>>()])
                .collect()
        })
        .collect();

    for j in (0..depth).rev() {
        let (p0, p1) = family.level_pair(j);
        let nodes = p0.node_count();
        let lower_cols = 1usize << j;
        let next: Result<Vec<Vec<Vec<Vec<f64>>>>> = (0..1usize << j)
            .into_par_iter()
            .map(|prefix| {
                let low = &states[prefix];
                let high = &states[prefix | 1 << j];
                let mut columns = Vec::with_capacity(lower_cols);
                for q in 0..lower_cols {
                    let mut survivors: Vec<Vec<f64>> = Vec::new();
                    let mut capped = false;
                    for sums0 in &low[2 * q] {
                        for diffs0 in &low[2 * q + 1] {
                            for sums1 in &high[2 * q] {
                                for diffs1 in &high[2 * q + 1] {
                                    let mut edges = Vec::with_capacity(nodes);
                                    let mut feasible = true;
                                    for (pairing, sums, diffs) in
                                        [(p0, sums0, diffs0), (p1, sums1, diffs1)]
                                    {
                                        for (row, &(a, b)) in pairing.pairs().iter().enumerate() {
                                            match pair_values(sums[row], diffs[row]) {
                                                Some((hi, lo)) => {
                                                    edges.push(EdgeValues { u: a, v: b, hi, lo })
                                                }
                                                None => {
                                                    feasible = false;
                                                    break;
                                                }
                                            }
                                        }
                                        if !feasible {
                                            break;
                                        }
                                    }
                                    if !feasible {
                                        continue;
                                    }
                                    for assignment in walk_survivors(nodes, &edges, COLUMN_SET_CAP) {
                                        if !survivors.iter().any(|s| {
                                            s.iter().zip(&assignment).all(|(a, b)| close(*a, *b))
                                        }) {
                                            if survivors.len() >= COLUMN_SET_CAP {
                                                capped = true;
                                            } else {
                                                survivors.push(assignment);
                                            }
                                        }
                                    }
                                }
                            }
                        }
                    }
                    if capped {
                        return Err(Error::Ambiguous { level: j });
                    }
                    if survivors.is_empty() {
                        return Err(Error::Inconsistent { level: j });
                    }
                    columns.push(survivors);
                }
                Ok(columns)
            })
            .collect();
        states = next?;
    }

    let x_candidates = &states[0][0];
    match x_candidates.len() {
        1 => Ok(x_candidates[0].clone()),
        0 => Err(Error::Inconsistent { level: 0 }),
        _ => Err(Error::Ambiguous { level: 0 }),
    }
}
