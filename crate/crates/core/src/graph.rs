//! Finite weighted graphs viewed as metric measure spaces with a boundary.
//!
//! A [`MetricMeasureGraph`] carries two measures: `mu` lives on interior
//! vertices (for means and `L^p` norms) and on edges (for gradient energies),
//! while `nu` lives on boundary vertices. The metric is the shortest-path
//! distance induced by the edge lengths.

use std::cmp::Ordering;
use std::collections::{BinaryHeap, HashMap, HashSet};
use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum VertexKind {
    Interior,
    Boundary,
}

/// Which vertex measure a ball query sums.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Measure {
    Mu,
    Nu,
}

/// Vertex as it appears in a graph file, before validation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VertexRecord {
    pub id: String,
    pub boundary: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mu: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub nu: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pos: Option<[f64; 2]>,
}

impl VertexRecord {
    pub fn interior(id: impl Into<String>, mu: f64) -> Self {
        Self {
            id: id.into(),
            boundary: false,
            mu: Some(mu),
            nu: None,
            pos: None,
        }
    }

    pub fn boundary(id: impl Into<String>, nu: f64) -> Self {
        Self {
            id: id.into(),
            boundary: true,
            mu: None,
            nu: Some(nu),
            pos: None,
        }
    }

    pub fn at(mut self, x: f64, y: f64) -> Self {
        self.pos = Some([x, y]);
        self
    }
}

/// Edge as it appears in a graph file, before validation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EdgeRecord {
    pub u: String,
    pub v: String,
    pub length: f64,
    pub mu: f64,
}

impl EdgeRecord {
    pub fn new(u: impl Into<String>, v: impl Into<String>, length: f64, mu: f64) -> Self {
        Self {
            u: u.into(),
            v: v.into(),
            length,
            mu,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub violations: Vec<String>,
}

impl ValidationReport {
    pub fn passed(&self) -> bool {
        self.violations.is_empty()
    }
}

fn positive(x: Option<f64>) -> bool {
    matches!(x, Some(v) if v.is_finite() && v > 0.0)
}

/// Checks every structural invariant of a graph without building it.
pub fn validate(vertices: &[VertexRecord], edges: &[EdgeRecord]) -> ValidationReport {
    let mut violations = Vec::new();
    let mut index = HashMap::new();
    for (i, v) in vertices.iter().enumerate() {
        if index.insert(v.id.as_str(), i).is_some() {
            violations.push(format!("duplicate vertex id `{}`", v.id));
        }
        if v.boundary {
            if !positive(v.nu) {
                violations.push(format!("boundary vertex `{}` needs positive nu", v.id));
            }
        } else if !positive(v.mu) {
            violations.push(format!("interior vertex `{}` needs positive mu", v.id));
        }
    }
    let n_boundary = vertices.iter().filter(|v| v.boundary).count();
    if n_boundary == vertices.len() {
        violations.push("empty interior".to_string());
    }
    if n_boundary < 2 {
        violations.push(format!(
            "need at least two boundary vertices, found {n_boundary}"
        ));
    }

    let mut seen = HashSet::new();
    let mut adjacency = vec![Vec::new(); vertices.len()];
    for e in edges {
        let (Some(&a), Some(&b)) = (index.get(e.u.as_str()), index.get(e.v.as_str())) else {
            violations.push(format!(
                "edge `{}`-`{}` references an unknown vertex",
                e.u, e.v
            ));
            continue;
        };
        if a == b {
            violations.push(format!("self-loop at `{}`", e.u));
            continue;
        }
        if !(e.length.is_finite() && e.length > 0.0) {
            violations.push(format!("nonpositive length on edge `{}`-`{}`", e.u, e.v));
        }
        if !(e.mu.is_finite() && e.mu > 0.0) {
            violations.push(format!("nonpositive measure on edge `{}`-`{}`", e.u, e.v));
        }
        if !seen.insert((a.min(b), a.max(b))) {
            violations.push(format!("duplicate edge `{}`-`{}`", e.u, e.v));
        }
        adjacency[a].push(b);
        adjacency[b].push(a);
    }
    for (i, v) in vertices.iter().enumerate() {
        if v.boundary && adjacency[i].is_empty() {
            violations.push(format!("boundary vertex `{}` has no incident edge", v.id));
        }
    }
    if !vertices.is_empty() {
        let mut reached = vec![false; vertices.len()];
        let mut stack = vec![0];
        reached[0] = true;
        while let Some(x) = stack.pop() {
            for &y in &adjacency[x] {
                if !reached[y] {
                    reached[y] = true;
                    stack.push(y);
                }
            }
        }
        if reached.iter().any(|r| !r) {
            violations.push("graph is disconnected".to_string());
        }
    }
    ValidationReport { violations }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Edge {
    pub a: usize,
    pub b: usize,
    pub length: f64,
    pub mu: f64,
}

/// Dense symmetric matrix of shortest-path distances.
#[derive(Debug, Clone, PartialEq)]
pub struct DistanceMatrix {
    n: usize,
    data: Vec<f64>,
}

impl DistanceMatrix {
    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.n + j]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.n..(i + 1) * self.n]
    }
}

#[derive(PartialEq)]
struct Frontier(f64, usize);

impl Eq for Frontier {}

impl PartialOrd for Frontier {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Frontier {
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .0
            .total_cmp(&self.0)
            .then_with(|| other.1.cmp(&self.1))
    }
}

/// Shortest-path distances from every vertex (Dijkstra per source).
pub fn shortest_path_distances(
    n: usize,
    adjacency: &[Vec<(usize, usize)>],
    edges: &[Edge],
) -> Result<DistanceMatrix> {
    let mut data = vec![f64::INFINITY; n * n];
    for s in 0..n {
        let row = &mut data[s * n..(s + 1) * n];
        row[s] = 0.0;
        let mut heap = BinaryHeap::new();
        heap.push(Frontier(0.0, s));
        while let Some(Frontier(d, x)) = heap.pop() {
            if d > row[x] {
                continue;
            }
            for &(y, e) in &adjacency[x] {
                let nd = d + edges[e].length;
                if nd < row[y] {
                    row[y] = nd;
                    heap.push(Frontier(nd, y));
                }
            }
        }
        if row.iter().any(|d| d.is_infinite()) {
            return Err(Error::InvalidGraph(vec!["graph is disconnected".into()]));
        }
    }
    // Dijkstra from each end can round differently; symmetrize.
    for i in 0..n {
        for j in i + 1..n {
            let d = data[i * n + j].min(data[j * n + i]);
            data[i * n + j] = d;
            data[j * n + i] = d;
        }
    }
    Ok(DistanceMatrix { n, data })
}

/// Exponent pair for the boundary Besov space, tied by `theta = 1 - Theta / p`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BesovParams {
    pub p: f64,
    pub theta: f64,
    #[serde(rename = "Theta")]
    pub codim: f64,
}

impl BesovParams {
    pub fn from_theta(p: f64, theta: f64) -> Result<Self> {
        check_exponent(p)?;
        if !(theta > 0.0 && theta < 1.0) {
            return Err(Error::InvalidParameter(format!(
                "theta = {theta} must lie in (0, 1)"
            )));
        }
        Ok(Self {
            p,
            theta,
            codim: p * (1.0 - theta),
        })
    }

    pub fn from_codimension(p: f64, codim: f64) -> Result<Self> {
        check_exponent(p)?;
        if !(codim > 0.0 && codim < p) {
            return Err(Error::InvalidParameter(format!(
                "Theta = {codim} must lie in (0, p = {p})"
            )));
        }
        Ok(Self {
            p,
            theta: 1.0 - codim / p,
            codim,
        })
    }

    /// Builds from whichever of `theta` / `Theta` is present; exactly one must be.
    pub fn resolve(p: f64, theta: Option<f64>, codim: Option<f64>) -> Result<Self> {
        match (theta, codim) {
            (Some(t), None) => Self::from_theta(p, t),
            (None, Some(c)) => Self::from_codimension(p, c),
            (Some(_), Some(_)) => Err(Error::InvalidParameter(
                "give exactly one of theta and Theta".into(),
            )),
            (None, None) => Err(Error::InvalidParameter(
                "one of theta or Theta is required".into(),
            )),
        }
    }
}

pub(crate) fn check_exponent(p: f64) -> Result<()> {
    if p.is_finite() && p > 1.0 {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!(
            "exponent p = {p} must lie in (1, inf)"
        )))
    }
}

/// Validated, indexed graph. Immutable after construction.
#[derive(Debug)]
pub struct MetricMeasureGraph {
    ids: Vec<String>,
    index: HashMap<String, usize>,
    kinds: Vec<VertexKind>,
    /// `mu` for interior vertices, `nu` for boundary vertices.
    weights: Vec<f64>,
    positions: Vec<Option<[f64; 2]>>,
    edges: Vec<Edge>,
    adjacency: Vec<Vec<(usize, usize)>>,
    boundary: Vec<usize>,
    interior: Vec<usize>,
    boundary_slot: Vec<Option<usize>>,
    distances: OnceLock<DistanceMatrix>,
}

impl Clone for MetricMeasureGraph {
    fn clone(&self) -> Self {
        Self {
            ids: self.ids.clone(),
            index: self.index.clone(),
            kinds: self.kinds.clone(),
            weights: self.weights.clone(),
            positions: self.positions.clone(),
            edges: self.edges.clone(),
            adjacency: self.adjacency.clone(),
            boundary: self.boundary.clone(),
            interior: self.interior.clone(),
            boundary_slot: self.boundary_slot.clone(),
            distances: self
                .distances
                .get()
                .cloned()
                .map(OnceLock::from)
                .unwrap_or_default(),
        }
    }
}

impl MetricMeasureGraph {
    pub fn new(vertices: &[VertexRecord], edges: &[EdgeRecord]) -> Result<Self> {
        let report = validate(vertices, edges);
        if !report.passed() {
            return Err(Error::InvalidGraph(report.violations));
        }
        let n = vertices.len();
        let ids: Vec<String> = vertices.iter().map(|v| v.id.clone()).collect();
        let index: HashMap<String, usize> = ids
            .iter()
            .enumerate()
            .map(|(i, id)| (id.clone(), i))
            .collect();
        let mut kinds = Vec::with_capacity(n);
        let mut weights = Vec::with_capacity(n);
        let mut boundary = Vec::new();
        let mut interior = Vec::new();
        let mut boundary_slot = vec![None; n];
        for (i, v) in vertices.iter().enumerate() {
            if v.boundary {
                kinds.push(VertexKind::Boundary);
                weights.push(v.nu.unwrap_or_default());
                boundary_slot[i] = Some(boundary.len());
                boundary.push(i);
            } else {
                kinds.push(VertexKind::Interior);
                weights.push(v.mu.unwrap_or_default());
                interior.push(i);
            }
        }
        let edges: Vec<Edge> = edges
            .iter()
            .map(|e| Edge {
                a: index[&e.u],
                b: index[&e.v],
                length: e.length,
                mu: e.mu,
            })
            .collect();
        let mut adjacency = vec![Vec::new(); n];
        for (k, e) in edges.iter().enumerate() {
            adjacency[e.a].push((e.b, k));
            adjacency[e.b].push((e.a, k));
        }
        Ok(Self {
            ids,
            index,
            kinds,
            weights,
            positions: vertices.iter().map(|v| v.pos).collect(),
            edges,
            adjacency,
            boundary,
            interior,
            boundary_slot,
            distances: OnceLock::new(),
        })
    }

    pub fn num_vertices(&self) -> usize {
        self.ids.len()
    }

    pub fn num_edges(&self) -> usize {
        self.edges.len()
    }

    pub fn num_boundary(&self) -> usize {
        self.boundary.len()
    }

    pub fn num_interior(&self) -> usize {
        self.interior.len()
    }

    pub fn ids(&self) -> &[String] {
        &self.ids
    }

    pub fn id(&self, vertex: usize) -> &str {
        &self.ids[vertex]
    }

    pub fn vertex(&self, id: &str) -> Result<usize> {
        self.index
            .get(id)
            .copied()
            .ok_or_else(|| Error::UnknownVertex(id.to_string()))
    }

    pub fn kind(&self, vertex: usize) -> VertexKind {
        self.kinds[vertex]
    }

    pub fn is_boundary(&self, vertex: usize) -> bool {
        self.kinds[vertex] == VertexKind::Boundary
    }

    pub fn position(&self, vertex: usize) -> Option<[f64; 2]> {
        self.positions[vertex]
    }

    /// Interior measure `mu_x`; zero on boundary vertices.
    pub fn mu(&self, vertex: usize) -> f64 {
        if self.is_boundary(vertex) {
            0.0
        } else {
            self.weights[vertex]
        }
    }

    /// Boundary measure `nu_z`; zero on interior vertices.
    pub fn nu(&self, vertex: usize) -> f64 {
        if self.is_boundary(vertex) {
            self.weights[vertex]
        } else {
            0.0
        }
    }

    pub fn measure(&self, vertex: usize, which: Measure) -> f64 {
        match which {
            Measure::Mu => self.mu(vertex),
            Measure::Nu => self.nu(vertex),
        }
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    /// `(neighbour, edge index)` pairs incident to `vertex`.
    pub fn neighbors(&self, vertex: usize) -> &[(usize, usize)] {
        &self.adjacency[vertex]
    }

    /// Boundary vertices in file order; position in this slice is the boundary slot.
    pub fn boundary(&self) -> &[usize] {
        &self.boundary
    }

    pub fn interior(&self) -> &[usize] {
        &self.interior
    }

    pub fn boundary_slot(&self, vertex: usize) -> Option<usize> {
        self.boundary_slot[vertex]
    }

    /// `nu` weights in boundary-slot order.
    pub fn boundary_weights(&self) -> Vec<f64> {
        self.boundary.iter().map(|&z| self.weights[z]).collect()
    }

    /// `mu` weights over all vertices (zero on the boundary).
    pub fn interior_weights(&self) -> Vec<f64> {
        (0..self.num_vertices()).map(|x| self.mu(x)).collect()
    }

    pub fn total_measure(&self, which: Measure) -> f64 {
        (0..self.num_vertices())
            .map(|x| self.measure(x, which))
            .sum()
    }

    pub fn distances(&self) -> &DistanceMatrix {
        self.distances.get_or_init(|| {
            shortest_path_distances(self.num_vertices(), &self.adjacency, &self.edges)
                .expect("validated graphs are connected")
        })
    }

    pub fn distance(&self, x: usize, y: usize) -> f64 {
        self.distances().get(x, y)
    }

    pub fn diameter(&self) -> f64 {
        let d = self.distances();
        (0..d.len())
            .flat_map(|i| d.row(i).iter().copied())
            .fold(0.0, f64::max)
    }

    pub fn boundary_diameter(&self) -> f64 {
        let d = self.distances();
        let mut best = 0.0f64;
        for &x in &self.boundary {
            for &y in &self.boundary {
                best = best.max(d.get(x, y));
            }
        }
        best
    }

    /// Measure of the closed ball `{z : d(center, z) <= r}`.
    pub fn ball_measure(&self, center: usize, r: f64, which: Measure) -> f64 {
        let row = self.distances().row(center);
        let cut = closed_radius(r);
        row.iter()
            .enumerate()
            .filter(|&(_, &d)| d <= cut)
            .map(|(z, _)| self.measure(z, which))
            .sum()
    }

    pub fn ball_measure_by_id(&self, center: &str, r: f64, which: Measure) -> Result<f64> {
        if r.is_nan() || r < 0.0 {
            return Err(Error::InvalidParameter(format!(
                "radius {r} must be nonnegative"
            )));
        }
        Ok(self.ball_measure(self.vertex(center)?, r, which))
    }

    /// Returns the graph with every edge length multiplied by `length_scale`
    /// and every measure (`mu_x`, `mu_e`, `nu_z`) multiplied by `measure_scale`.
    pub fn rescaled(&self, length_scale: f64, measure_scale: f64) -> Result<Self> {
        let (vertices, edges) = self.to_records();
        let vertices: Vec<VertexRecord> = vertices
            .into_iter()
            .map(|mut v| {
                v.mu = v.mu.map(|m| m * measure_scale);
                v.nu = v.nu.map(|m| m * measure_scale);
                v
            })
            .collect();
        let edges: Vec<EdgeRecord> = edges
            .into_iter()
            .map(|mut e| {
                e.length *= length_scale;
                e.mu *= measure_scale;
                e
            })
            .collect();
        Self::new(&vertices, &edges)
    }

    pub fn to_records(&self) -> (Vec<VertexRecord>, Vec<EdgeRecord>) {
        let vertices = (0..self.num_vertices())
            .map(|x| VertexRecord {
                id: self.ids[x].clone(),
                boundary: self.is_boundary(x),
                mu: (!self.is_boundary(x)).then(|| self.weights[x]),
                nu: self.is_boundary(x).then(|| self.weights[x]),
                pos: self.positions[x],
            })
            .collect();
        let edges = self
            .edges
            .iter()
            .map(|e| EdgeRecord {
                u: self.ids[e.a].clone(),
                v: self.ids[e.b].clone(),
                length: e.length,
                mu: e.mu,
            })
            .collect();
        (vertices, edges)
    }
}

/// Radius used for closed-ball membership; absorbs rounding in path sums.
#[inline]
pub(crate) fn closed_radius(r: f64) -> f64 {
    r + 1e-12 * r.max(1.0)
}

#[cfg(test)]
pub(crate) mod fixtures {
    use super::*;

    /// `a - b - c`, endpoints on the boundary, every weight 1.
    pub fn p3() -> MetricMeasureGraph {
        path(3)
    }

    pub fn path(n: usize) -> MetricMeasureGraph {
        let vertices: Vec<VertexRecord> = (0..n)
            .map(|i| {
                let id = ((b'a' + i as u8) as char).to_string();
                if i == 0 || i == n - 1 {
                    VertexRecord::boundary(id, 1.0)
                } else {
                    VertexRecord::interior(id, 1.0)
                }
            })
            .collect();
        let edges: Vec<EdgeRecord> = (1..n)
            .map(|i| EdgeRecord::new(vertices[i - 1].id.clone(), vertices[i].id.clone(), 1.0, 1.0))
            .collect();
        MetricMeasureGraph::new(&vertices, &edges).unwrap()
    }
}
