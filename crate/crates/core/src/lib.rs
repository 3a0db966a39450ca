//! Dirichlet-to-Neumann and Neumann-to-Dirichlet maps for the p-Laplacian on
//! finite weighted graphs viewed as metric measure spaces.
//!
//! A [`MetricMeasureGraph`] splits its vertices into an interior, carrying the
//! measure `mu`, and a boundary, carrying `nu`. Boundary data live in a Besov
//! space whose energy is built from the shortest-path metric and `nu`; interior
//! functions carry the edge p-energy.

pub mod besov;
pub mod diagnostics;
pub mod dtn;
pub mod energy;
pub mod error;
pub mod generate;
pub mod graph;
pub mod io;
pub mod linalg;
pub mod search;
pub mod sobolev;
pub mod solvers;

pub use besov::{
    besov_energy, besov_kernel, besov_seminorm, dual_norm, nu_mean_zero, BesovKernel,
    BoundaryFunction, BoundaryFunctional, DualMethod, DualNorm,
};
pub use diagnostics::{
    codimension_fit, codimension_fit_on, diagnose, doubling_constant, poincare_constant,
    CodimensionFit, DiagnosticsReport,
};
pub use dtn::{
    bounds_report, c_p, dtn_apply, dtn_apply_with, dtn_norm, ntd_apply, ntd_norm, roundtrip_check,
    NormEntry, NormReport, RoundTrip,
};
pub use error::{Error, Result};
pub use generate::{generate, DomainKind};
pub use graph::{
    validate, BesovParams, EdgeRecord, Measure, MetricMeasureGraph, ValidationReport, VertexRecord,
};
pub use io::{FileParams, GraphFile};
pub use search::NormEstimate;
pub use sobolev::{
    capacity_p, extend_linear, extension_norm, gradient_norm, p_energy, p_laplacian, pairing,
    trace, trace_norm, NormMethod, VertexFunction,
};
pub use solvers::{
    brute_force_minimize, energy_bound_checks, solve_dirichlet, solve_neumann, BruteForceSpec,
    EnergyBoundReport, SolveResult, SolverConfig,
};
