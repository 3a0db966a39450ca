#![allow(dead_code)]

use pdtn_core::{generate, DomainKind, EdgeRecord, MetricMeasureGraph, VertexRecord};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Raw description of a random graph, kept alongside the built graph so the
/// oracles below never go through the library's internal edge storage.
#[derive(Debug, Clone)]
pub struct RawGraph {
    pub boundary: Vec<bool>,
    pub measure: Vec<f64>,
    /// (a, b, length, mu)
    pub edges: Vec<(usize, usize, f64, f64)>,
}

impl RawGraph {
    pub fn n(&self) -> usize {
        self.boundary.len()
    }

    pub fn id(i: usize) -> String {
        format!("v{i}")
    }

    pub fn build(&self) -> MetricMeasureGraph {
        let vertices: Vec<VertexRecord> = (0..self.n())
            .map(|i| {
                if self.boundary[i] {
                    VertexRecord::boundary(Self::id(i), self.measure[i])
                } else {
                    VertexRecord::interior(Self::id(i), self.measure[i])
                }
            })
            .collect();
        let edges: Vec<EdgeRecord> = self
            .edges
            .iter()
            .map(|&(a, b, l, m)| EdgeRecord::new(Self::id(a), Self::id(b), l, m))
            .collect();
        MetricMeasureGraph::new(&vertices, &edges).expect("random graph is valid")
    }

    /// Library vertex index of raw vertex `i`.
    pub fn index_map(&self, graph: &MetricMeasureGraph) -> Vec<usize> {
        (0..self.n())
            .map(|i| graph.vertex(&Self::id(i)).unwrap())
            .collect()
    }

    pub fn boundary_vertices(&self) -> Vec<usize> {
        (0..self.n()).filter(|&i| self.boundary[i]).collect()
    }

    pub fn interior_vertices(&self) -> Vec<usize> {
        (0..self.n()).filter(|&i| !self.boundary[i]).collect()
    }

    /// `sum mu_e |(u_b - u_a)/len|^p` over raw vertex values.
    pub fn energy(&self, u: &[f64], p: f64) -> f64 {
        self.edges
            .iter()
            .map(|&(a, b, l, m)| m * ((u[b] - u[a]) / l).abs().powf(p))
            .sum()
    }
}

/// Connected random graph with `n_boundary` boundary and `n_interior` interior
/// vertices: a random spanning tree plus a few chords, with every interior
/// vertex of degree at least two.
pub fn random_graph(seed: u64, n_boundary: usize, n_interior: usize) -> RawGraph {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = n_boundary + n_interior;
    let mut order: Vec<usize> = (0..n).collect();
    for i in (1..n).rev() {
        order.swap(i, rng.random_range(0..=i));
    }
    let boundary: Vec<bool> = (0..n).map(|i| order[i] < n_boundary).collect();
    let measure = (0..n).map(|_| rng.random_range(0.5..2.0)).collect();
    let mut edges = Vec::new();
    let mut seen = std::collections::BTreeSet::new();
    for i in 1..n {
        let j = rng.random_range(0..i);
        seen.insert((j, i));
        edges.push((j, i, rng.random_range(0.5..2.0), rng.random_range(0.5..2.0)));
    }
    for _ in 0..n / 2 {
        let a = rng.random_range(0..n);
        let b = rng.random_range(0..n);
        let key = (a.min(b), a.max(b));
        if a != b && seen.insert(key) {
            edges.push((
                key.0,
                key.1,
                rng.random_range(0.5..2.0),
                rng.random_range(0.5..2.0),
            ));
        }
    }
    // An interior leaf carries zero flux, so for p > 2 the objective is flat to
    // order |du|^p there and no value-based oracle can pin the solution down.
    for (i, &on_boundary) in boundary.iter().enumerate() {
        let degree = seen.iter().filter(|&&(a, b)| a == i || b == i).count();
        if !on_boundary && degree < 2 {
            if let Some(j) = (0..n).find(|&j| j != i && !seen.contains(&(i.min(j), i.max(j)))) {
                seen.insert((i.min(j), i.max(j)));
                edges.push((
                    i.min(j),
                    i.max(j),
                    rng.random_range(0.5..2.0),
                    rng.random_range(0.5..2.0),
                ));
            }
        }
    }
    RawGraph {
        boundary,
        measure,
        edges,
    }
}

pub fn random_values(seed: u64, n: usize) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n).map(|_| rng.random_range(-1.0..1.0)).collect()
}

pub fn domain(kind: DomainKind, size: usize) -> MetricMeasureGraph {
    let d = generate(kind, size).unwrap();
    MetricMeasureGraph::new(&d.vertices, &d.edges).unwrap()
}

/// The generated domains of the acceptance sweep.
pub fn sweep_domains() -> Vec<(String, MetricMeasureGraph)> {
    [
        (DomainKind::Path, 8, "path-8"),
        (DomainKind::Grid, 5, "grid-5"),
        (DomainKind::Lshape, 7, "lshape-7"),
        (DomainKind::Snowflake, 2, "snowflake-2"),
    ]
    .into_iter()
    .map(|(k, s, name)| (name.to_string(), domain(k, s)))
    .collect()
}

pub const SWEEP_P: [f64; 3] = [1.5, 2.0, 3.0];

pub fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}
