//! Data ingestion and generation: IDX image files, pixel scrambling,
//! image-grid and sphere geometries, smooth synthetic signals and a
//! deterministic stroke-rendered digit generator for desk-scale
//! classification runs.

use std::io::{Read, Write};
use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::multires::Graph;

const IDX_IMAGES_MAGIC: u32 = 0x0000_0803;
const IDX_LABELS_MAGIC: u32 = 0x0000_0801;

/// A batch of signals with optional labels, ground-truth geometry
/// (evaluation only), an applied scramble, and the active-vertex mask
/// (vertices nonzero in at least one signal).
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub signals: Vec<Vec<f64>>,
    pub labels: Option<Vec<usize>>,
    pub geometry: Option<Graph>,
    /// `signals[i][v]` came from original vertex `permutation[v]`.
    pub permutation: Option<Vec<usize>>,
    pub active: Vec<bool>,
}

impl Dataset {
    pub fn new(signals: Vec<Vec<f64>>, labels: Option<Vec<usize>>, geometry: Option<Graph>) -> Result<Self> {
        let d = signals.first().map_or(0, Vec::len);
        if signals.iter().any(|s| s.len() != d) {
            return Err(Error::InvalidConfig("signals must share one length".into()));
        }
        if let Some(l) = &labels {
            if l.len() != signals.len() {
                return Err(Error::IdxCountMismatch {
                    images: signals.len(),
                    labels: l.len(),
                });
            }
        }
        if let Some(g) = &geometry {
            if g.vertex_count() != d {
                return Err(Error::VertexCountMismatch {
                    multires: d,
                    graph: g.vertex_count(),
                });
            }
        }
        let active = active_mask(&signals, d);
        Ok(Dataset {
            signals,
            labels,
            geometry,
            permutation: None,
            active,
        })
    }

    pub fn len(&self) -> usize {
        self.signals.len()
    }

    pub fn is_empty(&self) -> bool {
        self.signals.is_empty()
    }

    pub fn d(&self) -> usize {
        self.signals.first().map_or(0, Vec::len)
    }

    /// First `n` examples.
    pub fn take(&self, n: usize) -> Dataset {
        let n = n.min(self.len());
        Dataset {
            signals: self.signals[..n].to_vec(),
            labels: self.labels.as_ref().map(|l| l[..n].to_vec()),
            geometry: self.geometry.clone(),
            permutation: self.permutation.clone(),
            active: active_mask(&self.signals[..n], self.d()),
        }
    }
}

fn active_mask(signals: &[Vec<f64>], d: usize) -> Vec<bool> {
    let mut active = vec![false; d];
    for s in signals {
        for (v, &x) in s.iter().enumerate() {
            if x != 0.0 {
                active[v] = true;
            }
        }
    }
    active
}

// ---------------------------------------------------------------------------
// IDX format
// ---------------------------------------------------------------------------

fn read_u32_be(bytes: &[u8], at: usize, what: &str) -> Result<u32> {
    bytes
        .get(at..at + 4)
        .map(|b| u32::from_be_bytes(b.try_into().expect("4 bytes")))
        .ok_or_else(|| Error::TruncatedIdx(what.to_string()))
}

/// Parse big-endian IDX image/label files into a dataset: pixel bytes
/// scale to `[0, 1]`, each image is placed top-left in a zero-padded
/// power-of-two square, and the padded grid graph is attached as
/// ground-truth geometry. Padding pixels stay zero in every signal, so
/// the active mask excludes them.
pub fn load_idx(images_path: &Path, labels_path: &Path) -> Result<Dataset> {
    let mut image_bytes = Vec::new();
    std::fs::File::open(images_path)?.read_to_end(&mut image_bytes)?;
    let magic = read_u32_be(&image_bytes, 0, "image magic")?;
    if magic != IDX_IMAGES_MAGIC {
        return Err(Error::BadIdxMagic {
            got: magic,
            expected: IDX_IMAGES_MAGIC,
        });
    }
    let count = read_u32_be(&image_bytes, 4, "image count")? as usize;
    let rows = read_u32_be(&image_bytes, 8, "image rows")? as usize;
    let cols = read_u32_be(&image_bytes, 12, "image cols")? as usize;
    let payload = &image_bytes[16..];
    if payload.len() != count * rows * cols {
        return Err(Error::TruncatedIdx(format!(
            "expected {} pixel bytes, found {}",
            count * rows * cols,
            payload.len()
        )));
    }

    let mut label_bytes = Vec::new();
    std::fs::File::open(labels_path)?.read_to_end(&mut label_bytes)?;
    let magic = read_u32_be(&label_bytes, 0, "label magic")?;
    if magic != IDX_LABELS_MAGIC {
        return Err(Error::BadIdxMagic {
            got: magic,
            expected: IDX_LABELS_MAGIC,
        });
    }
    let label_count = read_u32_be(&label_bytes, 4, "label count")? as usize;
    let label_payload = &label_bytes[8..];
    if label_payload.len() != label_count {
        return Err(Error::TruncatedIdx(format!(
            "expected {label_count} label bytes, found {}",
            label_payload.len()
        )));
    }
    if label_count != count {
        return Err(Error::IdxCountMismatch {
            images: count,
            labels: label_count,
        });
    }

    let side = rows.max(cols).next_power_of_two();
    let signals: Vec<Vec<f64>> = payload
        .chunks_exact(rows * cols)
        .map(|img| {
            let mut padded = vec![0.0f64; side * side];
            for r in 0..rows {
                for c in 0..cols {
                    padded[r * side + c] = img[r * cols + c] as f64 / 255.0;
                }
            }
            padded
        })
        .collect();
    let labels: Vec<usize> = label_payload.iter().map(|&b| b as usize).collect();
    Dataset::new(signals, Some(labels), Some(grid_graph(side, side)))
}

/// Write images (byte pixels, `rows × cols` each) in IDX format.
pub fn write_idx_images(path: &Path, images: &[Vec<u8>], rows: usize, cols: usize) -> Result<()> {
    let mut file = std::fs::File::create(path)?;
    file.write_all(&IDX_IMAGES_MAGIC.to_be_bytes())?;
    file.write_all(&(images.len() as u32).to_be_bytes())?;
    file.write_all(&(rows as u32).to_be_bytes())?;
    file.write_all(&(cols as u32).to_be_bytes())?;
    for img in images {
        if img.len() != rows * cols {
            return Err(Error::InvalidConfig("image size mismatch while writing IDX".into()));
        }
        file.write_all(img)?;
    }
    Ok(())
}

/// Write labels in IDX format.
pub fn write_idx_labels(path: &Path, labels: &[usize]) -> Result<()> {
    let mut file = std::fs::File::create(path)?;
    file.write_all(&IDX_LABELS_MAGIC.to_be_bytes())?;
    file.write_all(&(labels.len() as u32).to_be_bytes())?;
    let bytes: Vec<u8> = labels.iter().map(|&l| l as u8).collect();
    file.write_all(&bytes)?;
    Ok(())
}

/// Zero-pad a signal to the next power-of-two length; returns the padded
/// signal and the padded-vertex mask (true for original positions), so
/// callers can exclude padding from active-vertex statistics.
pub fn pad_to_power_of_two(signal: &[f64]) -> (Vec<f64>, Vec<bool>) {
    let padded_len = signal.len().max(1).next_power_of_two();
    let mut padded = signal.to_vec();
    padded.resize(padded_len, 0.0);
    let mut original = vec![true; signal.len()];
    original.resize(padded_len, false);
    (padded, original)
}

// ---------------------------------------------------------------------------
// Scrambling
// ---------------------------------------------------------------------------

/// Apply one seeded random pixel permutation to every signal. The
/// ground-truth geometry and active mask are relabeled through the same
/// permutation, so evaluation still works; the applied permutation is
/// recorded (composed with any earlier one).
pub fn scramble(dataset: &Dataset, seed: u64) -> Result<Dataset> {
    let d = dataset.d();
    let mut perm: Vec<usize> = (0..d).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    perm.shuffle(&mut rng);
    apply_permutation(dataset, &perm)
}

/// Scramble with an explicit permutation: output position `v` takes the
/// value of input position `perm[v]`.
pub fn apply_permutation(dataset: &Dataset, perm: &[usize]) -> Result<Dataset> {
    let d = dataset.d();
    if perm.len() != d {
        return Err(Error::VertexCountMismatch {
            multires: d,
            graph: perm.len(),
        });
    }
    let mut inverse = vec![usize::MAX; d];
    for (v, &src) in perm.iter().enumerate() {
        if src >= d || inverse[src] != usize::MAX {
            return Err(Error::InvalidConfig("permutation must be a bijection".into()));
        }
        inverse[src] = v;
    }
    let signals: Vec<Vec<f64>> = dataset
        .signals
        .iter()
        .map(|x| perm.iter().map(|&src| x[src]).collect())
        .collect();
    let geometry = match &dataset.geometry {
        Some(g) => Some(Graph::new(
            d,
            g.edges().map(|(u, v)| (inverse[u], inverse[v])),
        )?),
        None => None,
    };
    let active: Vec<bool> = perm.iter().map(|&src| dataset.active[src]).collect();
    let permutation = match &dataset.permutation {
        Some(prev) => perm.iter().map(|&src| prev[src]).collect(),
        None => perm.to_vec(),
    };
    Ok(Dataset {
        signals,
        labels: dataset.labels.clone(),
        geometry,
        permutation: Some(permutation),
        active,
    })
}

/// Invert the recorded scramble of a dataset.
pub fn unscramble(dataset: &Dataset) -> Result<Dataset> {
    let Some(perm) = &dataset.permutation else {
        return Ok(dataset.clone());
    };
    let d = dataset.d();
    let mut inverse = vec![0usize; d];
    for (v, &src) in perm.iter().enumerate() {
        inverse[src] = v;
    }
    let mut un = apply_permutation(
        &Dataset {
            permutation: None,
            ..dataset.clone()
        },
        &inverse,
    )?;
    un.permutation = None;
    Ok(un)
}

// ---------------------------------------------------------------------------
// Geometries
// ---------------------------------------------------------------------------

/// 8-neighborhood graph of a `width × height` pixel grid.
pub fn grid_graph(width: usize, height: usize) -> Graph {
    let mut edges = Vec::new();
    for r in 0..height {
        for c in 0..width {
            let v = r * width + c;
            for (dr, dc) in [(0i64, 1i64), (1, -1), (1, 0), (1, 1)] {
                let (nr, nc) = (r as i64 + dr, c as i64 + dc);
                if nr >= 0 && nr < height as i64 && nc >= 0 && nc < width as i64 {
                    edges.push((v, nr as usize * width + nc as usize));
                }
            }
        }
    }
    Graph::new(width * height, edges).expect("grid edges are valid by construction")
}

/// Points sampled uniformly on the unit sphere plus the geodesic
/// neighborhood graph (edge iff arc distance below the threshold).
#[derive(Debug, Clone)]
pub struct SpherePointCloud {
    pub points: Vec<[f64; 3]>,
    pub graph: Graph,
    pub threshold: f64,
}

/// One standard-normal draw (Box-Muller; `u1` bounded away from zero).
pub fn standard_normal(rng: &mut ChaCha8Rng) -> f64 {
    let u1: f64 = rng.random_range(f64::MIN_POSITIVE..1.0);
    let u2: f64 = rng.random_range(0.0..1.0);
    (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
}

/// Sample `count` unit vectors (normalized Gaussian triples) and connect
/// pairs with geodesic distance below `threshold` radians.
pub fn sphere_sample(count: usize, threshold: f64, seed: u64) -> Result<SpherePointCloud> {
    if count == 0 || !(0.0..std::f64::consts::PI).contains(&threshold) {
        return Err(Error::InvalidConfig(format!(
            "need count ≥ 1 and 0 < threshold < π, got {count} and {threshold}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut points = Vec::with_capacity(count);
    while points.len() < count {
        let p = [
            standard_normal(&mut rng),
            standard_normal(&mut rng),
            standard_normal(&mut rng),
        ];
        let norm = (p[0] * p[0] + p[1] * p[1] + p[2] * p[2]).sqrt();
        if norm > 1e-12 {
            points.push([p[0] / norm, p[1] / norm, p[2] / norm]);
        }
    }
    let cos_threshold = threshold.cos();
    let edges: Vec<(usize, usize)> = (0..count)
        .into_par_iter()
        .flat_map_iter(|i| {
            let pi = points[i];
            let points = &points;
            ((i + 1)..count).filter_map(move |j| {
                let pj = points[j];
                let dot = pi[0] * pj[0] + pi[1] * pj[1] + pi[2] * pj[2];
                // arccos is monotone decreasing: closer than the threshold
                // angle iff the dot product exceeds its cosine.
                (dot > cos_threshold).then_some((i, j))
            })
        })
        .collect();
    Ok(SpherePointCloud {
        graph: Graph::new(count, edges)?,
        points,
        threshold,
    })
}

/// Write signals as CSV, one signal per row.
pub fn write_signals_csv(path: &Path, signals: &[Vec<f64>]) -> Result<()> {
    let mut out = String::new();
    for signal in signals {
        let row: Vec<String> = signal.iter().map(f64::to_string).collect();
        out.push_str(&row.join(","));
        out.push('\n');
    }
    std::fs::write(path, out)?;
    Ok(())
}

/// Read signals from CSV, one signal per row; rows must agree in length.
pub fn read_signals_csv(path: &Path) -> Result<Vec<Vec<f64>>> {
    let text = std::fs::read_to_string(path)?;
    let mut signals = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let row: std::result::Result<Vec<f64>, _> =
            line.split(',').map(|v| v.trim().parse::<f64>()).collect();
        let row = row.map_err(|e| {
            Error::InvalidConfig(format!("bad CSV value on line {}: {e}", lineno + 1))
        })?;
        if let Some(first) = signals.first() {
            let _: &Vec<f64> = first;
            if first.len() != row.len() {
                return Err(Error::InvalidConfig(format!(
                    "CSV row {} has {} values, expected {}",
                    lineno + 1,
                    row.len(),
                    first.len()
                )));
            }
        }
        signals.push(row);
    }
    Ok(signals)
}

/// Read one integer label per CSV line.
pub fn read_labels_csv(path: &Path) -> Result<Vec<usize>> {
    let text = std::fs::read_to_string(path)?;
    text.lines()
        .enumerate()
        .filter(|(_, line)| !line.trim().is_empty())
        .map(|(lineno, line)| {
            line.trim().parse::<usize>().map_err(|e| {
                Error::InvalidConfig(format!("bad label on line {}: {e}", lineno + 1))
            })
        })
        .collect()
}

/// Write points as `x,y,z` CSV rows.
pub fn write_point_cloud_csv(path: &Path, cloud: &SpherePointCloud) -> Result<()> {
    let mut out = String::new();
    for p in &cloud.points {
        out.push_str(&format!("{},{},{}\n", p[0], p[1], p[2]));
    }
    std::fs::write(path, out)?;
    Ok(())
}

// ---------------------------------------------------------------------------
// Synthetic signals
// ---------------------------------------------------------------------------

/// Nonnegative smooth signals on a graph: uniform noise diffused by
/// repeated neighborhood averaging. Total variation along edges decreases
/// with every step.
pub fn synthetic_smooth(graph: &Graph, count: usize, seed: u64, smoothing_steps: usize) -> Dataset {
    let d = graph.vertex_count();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let signals: Vec<Vec<f64>> = (0..count)
        .map(|_| {
            let mut x: Vec<f64> = (0..d).map(|_| rng.random_range(0.0..1.0)).collect();
            for _ in 0..smoothing_steps {
                let mut next = vec![0.0f64; d];
                for v in 0..d {
                    let mut acc = x[v];
                    for &w in graph.neighbors(v) {
                        acc += x[w];
                    }
                    next[v] = acc / (graph.degree(v) + 1) as f64;
                }
                x = next;
            }
            x
        })
        .collect();
    Dataset::new(signals, None, Some(graph.clone())).expect("generated signals are consistent")
}

/// Total variation of a signal along graph edges.
pub fn total_variation(graph: &Graph, x: &[f64]) -> f64 {
    graph.edges().map(|(u, v)| (x[u] - x[v]).abs()).sum()
}

// ---------------------------------------------------------------------------
// Rotations and sphere projection
// ---------------------------------------------------------------------------

fn quaternion_to_matrix(w: f64, x: f64, y: f64, z: f64) -> [[f64; 3]; 3] {
    [
        [
            1.0 - 2.0 * (y * y + z * z),
            2.0 * (x * y - w * z),
            2.0 * (x * z + w * y),
        ],
        [
            2.0 * (x * y + w * z),
            1.0 - 2.0 * (x * x + z * z),
            2.0 * (y * z - w * x),
        ],
        [
            2.0 * (x * z - w * y),
            2.0 * (y * z + w * x),
            1.0 - 2.0 * (x * x + y * y),
        ],
    ]
}

/// Rotation drawn uniformly from SO(3) (normalized Gaussian quaternion).
pub fn random_rotation_uniform(seed: u64) -> [[f64; 3]; 3] {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    loop {
        let (w, x, y, z) = (
            standard_normal(&mut rng),
            standard_normal(&mut rng),
            standard_normal(&mut rng),
            standard_normal(&mut rng),
        );
        let n = (w * w + x * x + y * y + z * z).sqrt();
        if n > 1e-12 {
            return quaternion_to_matrix(w / n, x / n, y / n, z / n);
        }
    }
}

/// Small rotation: uniform axis, angle `angle_sigma · |N(0,1)|`.
pub fn random_rotation_small(seed: u64, angle_sigma: f64) -> [[f64; 3]; 3] {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let axis = loop {
        let a = [
            standard_normal(&mut rng),
            standard_normal(&mut rng),
            standard_normal(&mut rng),
        ];
        let n = (a[0] * a[0] + a[1] * a[1] + a[2] * a[2]).sqrt();
        if n > 1e-12 {
            break [a[0] / n, a[1] / n, a[2] / n];
        }
    };
    let angle = angle_sigma * standard_normal(&mut rng);
    let (s, c) = (angle / 2.0).sin_cos();
    quaternion_to_matrix(c, s * axis[0], s * axis[1], s * axis[2])
}

fn orthogonality_residual(r: &[[f64; 3]; 3]) -> f64 {
    let mut max = 0.0f64;
    for i in 0..3 {
        for j in 0..3 {
            let mut dot = 0.0;
            for k in 0..3 {
                dot += r[k][i] * r[k][j];
            }
            let expect = if i == j { 1.0 } else { 0.0 };
            max = max.max((dot - expect).abs());
        }
    }
    max
}

/// Project an image onto sphere sample points: the image sits on the
/// gnomonic tangent patch at the north pole with half-angle
/// `patch_half_angle`, the patch is rotated by `rotation`, and each cloud
/// point samples it by bilinear interpolation. Each sample is scaled by
/// the square root of the local pixel-to-point solid-angle ratio (the
/// gnomonic map compresses solid angle by `(1+u²+v²)^(3/2)`), so signal
/// energy roughly matches image energy.
pub fn project_to_sphere(
    image: &[f64],
    width: usize,
    height: usize,
    cloud: &SpherePointCloud,
    rotation: &[[f64; 3]; 3],
    patch_half_angle: f64,
) -> Result<Vec<f64>> {
    if image.len() != width * height {
        return Err(Error::InvalidConfig("image dimensions mismatch".into()));
    }
    let residual = orthogonality_residual(rotation);
    if residual > 1e-8 {
        return Err(Error::NotOrthogonal(residual));
    }
    let tan_half = patch_half_angle.tan();
    let n = cloud.points.len() as f64;
    let pixel_tangent_area = (2.0 * tan_half / width as f64) * (2.0 * tan_half / height as f64);
    let point_solid_angle = 4.0 * std::f64::consts::PI / n;
    let flat_scale = (pixel_tangent_area / point_solid_angle).sqrt();
    let signal = cloud
        .points
        .iter()
        .map(|p| {
            // Inverse-rotate the point into patch coordinates.
            let q = [
                rotation[0][0] * p[0] + rotation[1][0] * p[1] + rotation[2][0] * p[2],
                rotation[0][1] * p[0] + rotation[1][1] * p[1] + rotation[2][1] * p[2],
                rotation[0][2] * p[0] + rotation[1][2] * p[1] + rotation[2][2] * p[2],
            ];
            if q[2] <= 0.05 {
                return 0.0;
            }
            let u = q[0] / q[2];
            let v = q[1] / q[2];
            if u.abs() > tan_half || v.abs() > tan_half {
                return 0.0;
            }
            let col = (u / tan_half + 1.0) / 2.0 * (width as f64 - 1.0);
            let row = (v / tan_half + 1.0) / 2.0 * (height as f64 - 1.0);
            let (c0, r0) = (col.floor() as usize, row.floor() as usize);
            let (c1, r1) = ((c0 + 1).min(width - 1), (r0 + 1).min(height - 1));
            let (fc, fr) = (col - c0 as f64, row - r0 as f64);
            let sample = image[r0 * width + c0] * (1.0 - fr) * (1.0 - fc)
                + image[r0 * width + c1] * (1.0 - fr) * fc
                + image[r1 * width + c0] * fr * (1.0 - fc)
                + image[r1 * width + c1] * fr * fc;
            let area_compression = (1.0 + u * u + v * v).powf(0.75);
            sample * flat_scale / area_compression
        })
        .collect();
    Ok(signal)
}

// ---------------------------------------------------------------------------
// Stroke-rendered digits
// ---------------------------------------------------------------------------

const DIGIT_SIDE: usize = 28;

/// Control polylines per digit in unit-square coordinates (x right,
/// y down). Deliberately schematic; per-instance jitter supplies the
/// variability.
fn digit_strokes(digit: usize) -> Vec<Vec<(f64, f64)>> {
    fn arc(cx: f64, cy: f64, rx: f64, ry: f64, from_deg: f64, to_deg: f64, steps: usize) -> Vec<(f64, f64)> {
        (0..=steps)
            .map(|i| {
                let t = (from_deg + (to_deg - from_deg) * i as f64 / steps as f64).to_radians();
                (cx + rx * t.cos(), cy + ry * t.sin())
            })
            .collect()
    }
    match digit {
        0 => vec![arc(0.5, 0.5, 0.32, 0.42, 0.0, 360.0, 24)],
        1 => vec![vec![(0.38, 0.22), (0.55, 0.08), (0.55, 0.92)]],
        2 => vec![
            arc(0.5, 0.3, 0.3, 0.22, 180.0, 360.0, 12),
            vec![(0.8, 0.3), (0.25, 0.9), (0.8, 0.9)],
        ],
        3 => vec![
            arc(0.45, 0.3, 0.3, 0.22, 150.0, 390.0, 12),
            arc(0.45, 0.72, 0.33, 0.22, 330.0, 570.0, 12),
        ],
        4 => vec![
            vec![(0.65, 0.08), (0.2, 0.62), (0.85, 0.62)],
            vec![(0.65, 0.08), (0.65, 0.92)],
        ],
        5 => vec![
            vec![(0.78, 0.1), (0.3, 0.1), (0.26, 0.48)],
            arc(0.5, 0.68, 0.28, 0.24, 250.0, 480.0, 14),
        ],
        6 => vec![
            vec![(0.68, 0.08), (0.38, 0.45)],
            arc(0.5, 0.68, 0.28, 0.24, 0.0, 360.0, 18),
        ],
        7 => vec![vec![(0.2, 0.1), (0.8, 0.1), (0.42, 0.92)]],
        8 => vec![
            arc(0.5, 0.3, 0.24, 0.2, 0.0, 360.0, 16),
            arc(0.5, 0.72, 0.3, 0.22, 0.0, 360.0, 16),
        ],
        _ => vec![
            arc(0.52, 0.32, 0.27, 0.23, 0.0, 360.0, 18),
            vec![(0.78, 0.35), (0.62, 0.92)],
        ],
    }
}

fn render_digit(digit: usize, rng: &mut ChaCha8Rng) -> Vec<u8> {
    let side = DIGIT_SIDE as f64;
    let mut canvas = vec![0.0f64; DIGIT_SIDE * DIGIT_SIDE];
    // Per-instance geometric jitter.
    let scale = rng.random_range(0.82..1.02) * (side - 6.0);
    let angle: f64 = rng.random_range(-0.14..0.14);
    let shear: f64 = rng.random_range(-0.12..0.12);
    let (dx, dy) = (
        rng.random_range(2.0..4.5),
        rng.random_range(2.0..4.5),
    );
    let thickness: f64 = rng.random_range(1.0..1.6);
    let (sin, cos) = angle.sin_cos();
    for stroke in digit_strokes(digit) {
        let jittered: Vec<(f64, f64)> = stroke
            .iter()
            .map(|&(x, y)| {
                let (x, y) = (x - 0.5 + rng.random_range(-0.015..0.015), y - 0.5 + rng.random_range(-0.015..0.015));
                let (x, y) = (x + shear * y, y);
                let (x, y) = (cos * x - sin * y, sin * x + cos * y);
                (x * scale + side / 2.0 + dx - 3.0, y * scale + side / 2.0 + dy - 3.0)
            })
            .collect();
        for w in jittered.windows(2) {
            let (x0, y0) = w[0];
            let (x1, y1) = w[1];
            let length = ((x1 - x0).powi(2) + (y1 - y0).powi(2)).sqrt();
            let steps = (length * 2.0).ceil().max(1.0) as usize;
            for s in 0..=steps {
                let t = s as f64 / steps as f64;
                let (px, py) = (x0 + t * (x1 - x0), y0 + t * (y1 - y0));
                // Stamp a small Gaussian blob.
                let reach = (2.0 * thickness).ceil() as i64;
                for br in -reach..=reach {
                    for bc in -reach..=reach {
                        let (r, c) = (py.round() as i64 + br, px.round() as i64 + bc);
                        if r < 0 || c < 0 || r >= DIGIT_SIDE as i64 || c >= DIGIT_SIDE as i64 {
                            continue;
                        }
                        let dist_sq = (r as f64 - py).powi(2) + (c as f64 - px).powi(2);
                        let value = (-dist_sq / (thickness * thickness)).exp();
                        let cell = &mut canvas[r as usize * DIGIT_SIDE + c as usize];
                        *cell = cell.max(value);
                    }
                }
            }
        }
    }
    // Sensor-style speckle so classes are not trivially separable.
    canvas
        .iter()
        .map(|&v| {
            let noisy = v.min(1.0) + 0.06 * standard_normal(rng);
            (noisy.clamp(0.0, 1.0) * 255.0).round() as u8
        })
        .collect()
}

/// Deterministic stroke-rendered 28×28 digit images with uniform random
/// labels: a desk-scale stand-in for handwritten-digit corpora when none
/// is on disk. Returns byte images and labels, ready for IDX writing.
pub fn synthetic_digits(count: usize, seed: u64) -> (Vec<Vec<u8>>, Vec<usize>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut images = Vec::with_capacity(count);
    let mut labels = Vec::with_capacity(count);
    for _ in 0..count {
        let digit = rng.random_range(0..10usize);
        images.push(render_digit(digit, &mut rng));
        labels.push(digit);
    }
    (images, labels)
}

/// Render synthetic digits into IDX files under `dir` and load them back
/// through the regular IDX path.
pub fn synthetic_digits_dataset(dir: &Path, count: usize, seed: u64) -> Result<Dataset> {
    let (images, labels) = synthetic_digits(count, seed);
    let images_path = dir.join(format!("digits-{seed}-{count}-images.idx3-ubyte"));
    let labels_path = dir.join(format!("digits-{seed}-{count}-labels.idx1-ubyte"));
    write_idx_images(&images_path, &images, DIGIT_SIDE, DIGIT_SIDE)?;
    write_idx_labels(&labels_path, &labels)?;
    load_idx(&images_path, &labels_path)
}
