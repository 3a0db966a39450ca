//! Shared fixtures for the benchmarks.

use pdtn_core::{generate, BoundaryFunction, DomainKind, MetricMeasureGraph};

pub fn domain(kind: DomainKind, size: usize) -> MetricMeasureGraph {
    let d = generate(kind, size).expect("valid size");
    MetricMeasureGraph::new(&d.vertices, &d.edges).expect("generated graphs validate")
}

/// Smooth but non-affine boundary data, so no exponent is solved by the
/// initial linear extension.
pub fn wave(graph: &MetricMeasureGraph) -> BoundaryFunction {
    BoundaryFunction(
        graph
            .boundary()
            .iter()
            .map(|&z| {
                let [x, y] = graph.position(z).unwrap_or([z as f64, 0.0]);
                (3.0 * x).sin() + x * y
            })
            .collect(),
    )
}
