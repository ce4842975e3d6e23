//! Python bindings: the main types and operations of `haar-scattering`
//! exposed as the `haar_scattering` extension module.

use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;

use haar_scattering::multires;

fn err(e: haar_scattering::Error) -> PyErr {
    PyValueError::new_err(e.to_string())
}

/// A multiresolution approximation of `d` vertices.
#[pyclass(name = "MultiresApprox", from_py_object)]
#[derive(Clone)]
struct PyMultires {
    inner: multires::MultiresApprox,
}

#[pymethods]
impl PyMultires {
    /// Build from per-level pairings: `pairings[j]` lists `[a, b]` index
    /// pairs over the level-`j` nodes.
    #[staticmethod]
    fn from_pairings(d: usize, pairings: Vec<Vec<(usize, usize)>>) -> PyResult<Self> {
        let mut validated = Vec::with_capacity(pairings.len());
        for (j, pairs) in pairings.into_iter().enumerate() {
            validated.push(multires::Pairing::new(pairs, d >> j).map_err(err)?);
        }
        Ok(PyMultires {
            inner: multires::MultiresApprox::build_from_pairings(d, validated).map_err(err)?,
        })
    }

    /// Known-geometry construction for a pixel grid; variants 0..4d.
    #[staticmethod]
    #[pyo3(signature = (width, height, depth, variant = 0))]
    fn grid(width: usize, height: usize, depth: usize, variant: usize) -> PyResult<Self> {
        Ok(PyMultires {
            inner: multires::grid_multires(width, height, depth, variant).map_err(err)?,
        })
    }

    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        Ok(PyMultires {
            inner: multires::MultiresApprox::from_json_str(text).map_err(err)?,
        })
    }

    fn to_json(&self) -> String {
        self.inner.to_json_string()
    }

    #[getter]
    fn d(&self) -> usize {
        self.inner.d()
    }

    #[getter]
    fn depth(&self) -> usize {
        self.inner.depth()
    }

    /// Vertex sets at one level, each sorted ascending.
    fn vertex_sets(&self, level: usize) -> PyResult<Vec<Vec<usize>>> {
        if level > self.inner.depth() {
            return Err(PyValueError::new_err(format!(
                "level {level} exceeds depth {}",
                self.inner.depth()
            )));
        }
        Ok(self.inner.vertex_sets(level).to_vec())
    }

    fn pairing(&self, level: usize) -> PyResult<Vec<(usize, usize)>> {
        if level >= self.inner.depth() {
            return Err(PyValueError::new_err(format!(
                "level {level} exceeds depth {}",
                self.inner.depth()
            )));
        }
        Ok(self.inner.pairing(level).pairs().to_vec())
    }

    /// Relabel vertices: vertex `v` becomes `map[v]`.
    fn relabel(&self, map: Vec<usize>) -> PyResult<Self> {
        Ok(PyMultires {
            inner: self.inner.relabel(&map).map_err(err)?,
        })
    }

    fn __repr__(&self) -> String {
        format!("MultiresApprox(d={}, depth={})", self.inner.d(), self.inner.depth())
    }
}

/// One scattering layer as nested lists.
#[pyclass(name = "ScatteringLayer")]
struct PyLayer {
    #[pyo3(get)]
    level: usize,
    #[pyo3(get)]
    rows: usize,
    #[pyo3(get)]
    cols: usize,
    data: Vec<f64>,
}

#[pymethods]
impl PyLayer {
    /// Row-major nested lists.
    fn to_lists(&self) -> Vec<Vec<f64>> {
        self.data.chunks(self.cols).map(<[f64]>::to_vec).collect()
    }

    fn __repr__(&self) -> String {
        format!("ScatteringLayer(level={}, rows={}, cols={})", self.level, self.rows, self.cols)
    }
}

fn layer_of(t: &haar_scattering::ScatteringTensor) -> PyLayer {
    PyLayer {
        level: t.level(),
        rows: t.rows(),
        cols: t.cols(),
        data: t.data().to_vec(),
    }
}

/// All cascade layers `S_0 x … S_J x`.
#[pyfunction]
fn transform(x: Vec<f64>, multires: &PyMultires, depth: usize) -> PyResult<Vec<PyLayer>> {
    let layers = haar_scattering::transform(&x, &multires.inner, depth).map_err(err)?;
    Ok(layers.iter().map(layer_of).collect())
}

/// Flattened top-layer coefficients of order ≤ `max_order`.
#[pyfunction]
fn scattering_features(
    x: Vec<f64>,
    multires: &PyMultires,
    depth: usize,
    max_order: usize,
) -> PyResult<Vec<f64>> {
    let layers = haar_scattering::transform(&x, &multires.inner, depth).map_err(err)?;
    Ok(haar_scattering::scattering::truncate_by_order(
        layers.last().expect("at least one layer"),
        max_order,
    ))
}

/// Boolean or/xor cascade; returns the top layer row-major.
#[pyfunction]
fn boolean_transform(x: Vec<bool>, multires: &PyMultires, depth: usize) -> PyResult<Vec<Vec<bool>>> {
    let layers = haar_scattering::scattering::boolean_transform(&x, &multires.inner, depth).map_err(err)?;
    let top = layers.last().expect("at least one layer");
    Ok((0..top.rows())
        .map(|n| (0..top.cols()).map(|q| top.get(n, q)).collect())
        .collect())
}

/// Learn one multiresolution from training signals by exact
/// minimum-weight pair matching, level by level.
#[pyfunction]
fn learn_multires(training: Vec<Vec<f64>>, depth: usize) -> PyResult<PyMultires> {
    let outcome = haar_scattering::pairing_learn::learn_multires(&training, depth).map_err(err)?;
    Ok(PyMultires {
        inner: outcome.multires,
    })
}

/// Learn an ensemble over disjoint training subsets; deterministic in
/// `seed`.
#[pyfunction]
fn learn_ensemble(
    training: Vec<Vec<f64>>,
    depth: usize,
    subsets: usize,
    seed: u64,
) -> PyResult<Vec<PyMultires>> {
    let outcome =
        haar_scattering::pairing_learn::learn_ensemble(&training, depth, subsets, seed).map_err(err)?;
    Ok(outcome
        .members
        .into_iter()
        .map(|m| PyMultires { inner: m.multires })
        .collect())
}

/// Round-trip a signal through the `2^depth` interlaced multiresolution
/// transforms and back. Raises on ambiguous (degenerate) inputs.
#[pyfunction]
fn reconstruct_roundtrip(x: Vec<f64>, depth: usize) -> PyResult<Vec<f64>> {
    let family =
        haar_scattering::reconstruct::standard_interlaced_family(x.len(), depth).map_err(err)?;
    let outputs = family.transforms(&x).map_err(err)?;
    haar_scattering::reconstruct::reconstruct(&outputs, &family).map_err(err)
}

/// Minimum-weight perfect matching of a symmetric cost matrix; returns
/// (pairs, total cost).
#[pyfunction]
fn min_weight_pairing(costs: Vec<Vec<f64>>) -> PyResult<(Vec<(usize, usize)>, f64)> {
    let n = costs.len();
    if costs.iter().any(|row| row.len() != n) {
        return Err(PyValueError::new_err("cost matrix must be square"));
    }
    let matrix = haar_scattering::pairing_learn::PairingCostMatrix::from_fn(n, |a, b| {
        0.5 * (costs[a][b] + costs[b][a])
    });
    let result = haar_scattering::pairing_learn::blossom_matching(&matrix).map_err(err)?;
    Ok((result.pairing.pairs().to_vec(), result.total_cost))
}

/// Per-level fraction of connected multiresolution sets in an
/// 8-neighbor grid graph.
#[pyfunction]
#[pyo3(signature = (multires, width, height, active = None))]
fn grid_connectivity(
    multires: &PyMultires,
    width: usize,
    height: usize,
    active: Option<Vec<bool>>,
) -> PyResult<Vec<f64>> {
    let graph = haar_scattering::datasets::grid_graph(width, height);
    haar_scattering::multires::connectivity_fraction(&multires.inner, &graph, active.as_deref())
        .map_err(err)
}


#[pymodule(name = "haar_scattering")]
fn python_module(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    m.add_class::<PyMultires>()?;
    m.add_class::<PyLayer>()?;
    m.add_function(wrap_pyfunction!(transform, m)?)?;
    m.add_function(wrap_pyfunction!(scattering_features, m)?)?;
    m.add_function(wrap_pyfunction!(boolean_transform, m)?)?;
    m.add_function(wrap_pyfunction!(learn_multires, m)?)?;
    m.add_function(wrap_pyfunction!(learn_ensemble, m)?)?;
    m.add_function(wrap_pyfunction!(reconstruct_roundtrip, m)?)?;
    m.add_function(wrap_pyfunction!(min_weight_pairing, m)?)?;
    m.add_function(wrap_pyfunction!(grid_connectivity, m)?)?;
    Ok(())
}
