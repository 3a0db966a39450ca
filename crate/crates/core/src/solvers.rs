//! Dirichlet and Neumann problems for the graph p-Laplacian.
//!
//! The Dirichlet solution minimizes the p-energy among functions with given
//! boundary values; the Neumann solution minimizes
//! `I(u) = (1/p) p_energy(u) - sum_z l_z u(z)` and is normalized to zero
//! interior `mu`-mean.

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::besov::{BoundaryFunction, BoundaryFunctional};
use crate::energy::{minimize, minimize_warm, Problem};
use crate::error::{Error, Result};
use crate::graph::{check_exponent, MetricMeasureGraph};
use crate::linalg::solve_mean_zero;
use crate::sobolev::{
    extend_linear, gradient_norm, graph_energy, mu_mean_zero, p_energy, p_laplacian, stiffness,
    VertexFunction,
};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    pub p: f64,
    /// Relative smoothing levels, strictly decreasing; the last must be <= 1e-8.
    pub eps_schedule: Vec<f64>,
    /// Euler-Lagrange residual tolerance relative to the flux scale.
    pub grad_tol: f64,
    pub max_iter: usize,
    pub seed: u64,
    /// Random restarts for nonconvex norm searches.
    pub restarts: usize,
}

impl SolverConfig {
    pub fn new(p: f64) -> Self {
        Self {
            p,
            eps_schedule: vec![1e-1, 1e-2, 1e-3, 1e-4, 1e-6, 1e-8],
            grad_tol: 1e-10,
            max_iter: 500,
            seed: 0,
            restarts: 16,
        }
    }

    pub fn with_p(&self, p: f64) -> Self {
        Self { p, ..self.clone() }
    }

    pub fn validate(&self) -> Result<()> {
        check_exponent(self.p)?;
        let s = &self.eps_schedule;
        if s.is_empty() || s.iter().any(|e| !(e.is_finite() && *e > 0.0)) {
            return Err(Error::InvalidParameter(
                "eps schedule must be positive and nonempty".into(),
            ));
        }
        if s.windows(2).any(|w| w[1] >= w[0]) {
            return Err(Error::InvalidParameter(
                "eps schedule must be strictly decreasing".into(),
            ));
        }
        if *s.last().unwrap() > 1e-8 {
            return Err(Error::InvalidParameter(
                "eps schedule must end at or below 1e-8".into(),
            ));
        }
        if !(self.grad_tol.is_finite() && self.grad_tol > 0.0) {
            return Err(Error::InvalidParameter("grad_tol must be positive".into()));
        }
        if self.max_iter == 0 {
            return Err(Error::InvalidParameter("max_iter must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveResult {
    pub u: VertexFunction,
    /// `p_energy(u)`.
    pub energy: f64,
    /// Minimized objective: `(1/p) p_energy(u)` for Dirichlet, `I(u)` for Neumann.
    pub objective: f64,
    pub el_residual: f64,
    /// Flux scale the residual is measured against.
    pub scale: f64,
    pub iterations: usize,
    pub converged: bool,
    /// Objective after each accepted step, starting from the initial iterate.
    #[serde(skip)]
    pub objective_trace: Vec<f64>,
}

fn finish(result: SolveResult) -> Result<SolveResult> {
    if result.converged {
        Ok(result)
    } else {
        Err(Error::NotConverged(Box::new(result)))
    }
}

/// p-harmonic function with boundary values `f`.
pub fn solve_dirichlet(
    f: &BoundaryFunction,
    graph: &MetricMeasureGraph,
    cfg: &SolverConfig,
) -> Result<SolveResult> {
    let x0 = extend_linear(f, graph)?;
    solve_dirichlet_from(f, graph, cfg, x0)
}

/// As [`solve_dirichlet`] with a caller-provided initial iterate; its boundary
/// values are overwritten by `f`.
pub fn solve_dirichlet_from(
    f: &BoundaryFunction,
    graph: &MetricMeasureGraph,
    cfg: &SolverConfig,
    x0: VertexFunction,
) -> Result<SolveResult> {
    dirichlet_impl(f, graph, cfg, x0, false)
}

/// As [`solve_dirichlet_from`] for an `x0` that is already close to the
/// solution, e.g. the solution for nearby boundary data.
pub(crate) fn solve_dirichlet_warm(
    f: &BoundaryFunction,
    graph: &MetricMeasureGraph,
    cfg: &SolverConfig,
    x0: VertexFunction,
) -> Result<SolveResult> {
    dirichlet_impl(f, graph, cfg, x0, true)
}

fn dirichlet_impl(
    f: &BoundaryFunction,
    graph: &MetricMeasureGraph,
    cfg: &SolverConfig,
    mut x0: VertexFunction,
    warm: bool,
) -> Result<SolveResult> {
    cfg.validate()?;
    if f.len() != graph.num_boundary() {
        return Err(Error::DimensionMismatch {
            expected: graph.num_boundary(),
            got: f.len(),
        });
    }
    if f.values().iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidParameter(
            "boundary data must be finite".into(),
        ));
    }
    for (k, &z) in graph.boundary().iter().enumerate() {
        x0.0[z] = f.values()[k];
    }
    let p = cfg.p;
    let energy = graph_energy(graph, p);
    let problem = Problem {
        energy: &energy,
        load: None,
        free: graph.interior().to_vec(),
        mean_weights: None,
    };
    let m = if warm {
        minimize_warm(&problem, x0.0, cfg)?
    } else {
        minimize(&problem, x0.0, cfg)?
    };
    let u = VertexFunction(m.x);
    let e = p_energy(&u, graph, p);
    finish(SolveResult {
        energy: e,
        objective: e / p,
        el_residual: m.residual,
        scale: m.scale,
        iterations: m.iterations,
        converged: m.converged,
        objective_trace: m.objective_trace,
        u,
    })
}

fn boundary_load(l: &BoundaryFunctional, graph: &MetricMeasureGraph) -> Vec<f64> {
    let mut load = vec![0.0; graph.num_vertices()];
    for (k, &z) in graph.boundary().iter().enumerate() {
        load[z] = l.weights()[k];
    }
    load
}

/// `I(u) = (1/p) p_energy(u) - sum_z l_z u(z)`.
pub fn neumann_objective(
    u: &VertexFunction,
    l: &BoundaryFunctional,
    graph: &MetricMeasureGraph,
    p: f64,
) -> f64 {
    let work: f64 = graph
        .boundary()
        .iter()
        .zip(l.weights())
        .map(|(&z, w)| w * u.0[z])
        .sum();
    p_energy(u, graph, p) / p - work
}

/// Minimizer of `I` with zero interior `mu`-mean.
pub fn solve_neumann(
    l: &BoundaryFunctional,
    graph: &MetricMeasureGraph,
    cfg: &SolverConfig,
) -> Result<SolveResult> {
    cfg.validate()?;
    if l.len() != graph.num_boundary() {
        return Err(Error::DimensionMismatch {
            expected: graph.num_boundary(),
            got: l.len(),
        });
    }
    // Re-check: the type guarantees it, but weights may have been built by hand.
    BoundaryFunctional::new(l.weights().to_vec())?;
    let p = cfg.p;
    let n = graph.num_vertices();
    if l.is_zero() {
        return Ok(SolveResult {
            u: VertexFunction::constant(n, 0.0),
            energy: 0.0,
            objective: 0.0,
            el_residual: 0.0,
            scale: 0.0,
            iterations: 0,
            converged: true,
            objective_trace: vec![0.0],
        });
    }
    let load = boundary_load(l, graph);
    // Warm start from the p = 2 solution, rescaled to the optimal multiple.
    let u2 = solve_mean_zero(&stiffness(graph), &DVector::from_column_slice(&load))?;
    let mut x0 = VertexFunction(u2.as_slice().to_vec());
    if p != 2.0 {
        let work: f64 = load.iter().zip(u2.iter()).map(|(a, b)| a * b).sum();
        let e = p_energy(&x0, graph, p);
        if work > 0.0 && e > 0.0 {
            x0 = x0.scaled((work / e).powf(1.0 / (p - 1.0)));
        }
    }
    solve_neumann_from(l, graph, cfg, x0)
}

/// As [`solve_neumann`] with a caller-provided initial iterate.
pub fn solve_neumann_from(
    l: &BoundaryFunctional,
    graph: &MetricMeasureGraph,
    cfg: &SolverConfig,
    x0: VertexFunction,
) -> Result<SolveResult> {
    cfg.validate()?;
    let p = cfg.p;
    let load = boundary_load(l, graph);
    let energy = graph_energy(graph, p);
    let problem = Problem {
        energy: &energy,
        load: Some(&load),
        free: (0..graph.num_vertices()).collect(),
        mean_weights: Some(graph.interior_weights()),
    };
    let x0 = mu_mean_zero(&x0, graph);
    let m = minimize(&problem, x0.0, cfg)?;
    let u = mu_mean_zero(&VertexFunction(m.x), graph);
    let (residual, scale) = problem.residual(&u.0);
    finish(SolveResult {
        energy: p_energy(&u, graph, p),
        objective: neumann_objective(&u, l, graph, p),
        el_residual: residual,
        scale,
        iterations: m.iterations,
        converged: residual <= problem.tolerance(&u.0, scale, cfg.grad_tol),
        objective_trace: m.objective_trace,
        u,
    })
}

#[derive(Debug, Clone, Copy)]
pub enum ElMode<'a> {
    /// Test vectors: indicators of interior vertices.
    Dirichlet,
    /// Test vectors: indicators of all vertices, with the functional term.
    Neumann(&'a BoundaryFunctional),
}

/// Max-abs Euler-Lagrange residual over the indicator test basis.
pub fn el_residual(
    u: &VertexFunction,
    graph: &MetricMeasureGraph,
    p: f64,
    mode: ElMode<'_>,
) -> f64 {
    let lap = p_laplacian(u, graph, p);
    match mode {
        ElMode::Dirichlet => graph
            .interior()
            .iter()
            .map(|&x| lap.0[x].abs())
            .fold(0.0, f64::max),
        ElMode::Neumann(l) => {
            let load = boundary_load(l, graph);
            lap.0
                .iter()
                .zip(&load)
                .map(|(a, b)| (a - b).abs())
                .fold(0.0, f64::max)
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnergyBoundReport {
    /// True when `l = 0`, where both bounds degenerate.
    pub skipped: bool,
    /// `alpha = I(u_L)`.
    pub alpha: f64,
    /// `(1 - p)/p (||L|| ||Tr||)^{p/(p-1)}`.
    pub alpha_lower_bound: f64,
    pub alpha_ok: bool,
    pub gradient_norm: f64,
    /// `(2p ||L|| ||Tr||)^{1/(p-1)} + 2|alpha| / (||L|| ||Tr||)`.
    pub gradient_bound: f64,
    pub gradient_ok: bool,
}

impl EnergyBoundReport {
    pub fn holds(&self) -> bool {
        self.skipped || (self.alpha_ok && self.gradient_ok)
    }
}

/// Relative slack allowed when checking the bounds against computed values.
pub const BOUND_SLACK: f64 = 1e-9;

/// Checks the lower bound on `I(u_L)` and the gradient bound of the Neumann
/// minimizer, given `||L||` (dual norm) and `||Tr||`.
pub fn energy_bound_checks(
    result: &SolveResult,
    graph: &MetricMeasureGraph,
    l: &BoundaryFunctional,
    l_norm: f64,
    tr_norm: f64,
    p: f64,
) -> EnergyBoundReport {
    let alpha = neumann_objective(&result.u, l, graph, p);
    let grad = gradient_norm(&result.u, graph, p);
    let c = l_norm * tr_norm;
    if l.is_zero() || c == 0.0 {
        return EnergyBoundReport {
            skipped: true,
            alpha,
            alpha_lower_bound: 0.0,
            alpha_ok: true,
            gradient_norm: grad,
            gradient_bound: f64::INFINITY,
            gradient_ok: true,
        };
    }
    let lower = (1.0 - p) / p * c.powf(p / (p - 1.0));
    let bound = (2.0 * p * c).powf(1.0 / (p - 1.0)) + 2.0 * alpha.abs() / c;
    EnergyBoundReport {
        skipped: false,
        alpha,
        alpha_lower_bound: lower,
        alpha_ok: alpha >= lower - BOUND_SLACK * lower.abs().max(alpha.abs()),
        gradient_norm: grad,
        gradient_bound: bound,
        gradient_ok: grad <= bound * (1.0 + BOUND_SLACK),
    }
}

/// Box bounds and grid density for [`brute_force_minimize`].
#[derive(Debug, Clone, PartialEq)]
pub struct BruteForceSpec {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    pub grid_points: usize,
}

const GOLDEN: f64 = 0.618_033_988_749_894_8;

fn golden_section(mut a: f64, mut b: f64, f: &mut impl FnMut(f64) -> f64) -> f64 {
    let mut c = b - GOLDEN * (b - a);
    let mut d = a + GOLDEN * (b - a);
    let mut fc = f(c);
    let mut fd = f(d);
    for _ in 0..200 {
        if (b - a).abs() <= 1e-15 * (a.abs() + b.abs()).max(1e-300) {
            break;
        }
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - GOLDEN * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + GOLDEN * (b - a);
            fd = f(d);
        }
    }
    if fc < fd {
        c
    } else {
        d
    }
}

/// Derivative-free minimization over a box of at most six variables: a full
/// grid scan followed by cyclic coordinate golden-section polishing with a
/// pattern move after every sweep. Deterministic.
pub fn brute_force_minimize(
    objective: &dyn Fn(&[f64]) -> f64,
    spec: &BruteForceSpec,
) -> Result<Vec<f64>> {
    let dims = spec.lower.len();
    if dims > 6 {
        return Err(Error::TooManyDimensions(dims));
    }
    if spec.upper.len() != dims {
        return Err(Error::DimensionMismatch {
            expected: dims,
            got: spec.upper.len(),
        });
    }
    if dims == 0 {
        return Ok(Vec::new());
    }
    let k = spec.grid_points.max(2);
    let node = |i: usize, j: usize| {
        spec.lower[i] + (spec.upper[i] - spec.lower[i]) * j as f64 / (k - 1) as f64
    };

    let mut best = vec![0.0; dims];
    let mut best_f = f64::INFINITY;
    let mut idx = vec![0usize; dims];
    let mut x = vec![0.0; dims];
    loop {
        for i in 0..dims {
            x[i] = node(i, idx[i]);
        }
        let fx = objective(&x);
        if fx < best_f {
            best_f = fx;
            best.copy_from_slice(&x);
        }
        let mut d = 0;
        while d < dims {
            idx[d] += 1;
            if idx[d] < k {
                break;
            }
            idx[d] = 0;
            d += 1;
        }
        if d == dims {
            break;
        }
    }

    let mut half: Vec<f64> = (0..dims)
        .map(|i| (spec.upper[i] - spec.lower[i]) / (k - 1) as f64)
        .collect();
    let mut x = best;
    for _ in 0..20_000 {
        let start = x.clone();
        for i in 0..dims {
            loop {
                let a = (x[i] - half[i]).max(spec.lower[i]);
                let b = (x[i] + half[i]).min(spec.upper[i]);
                let mut y = x.clone();
                let t = golden_section(a, b, &mut |t| {
                    y[i] = t;
                    objective(&y)
                });
                let at_edge = (t - a).abs() < 1e-3 * (b - a) && a > spec.lower[i]
                    || (b - t).abs() < 1e-3 * (b - a) && b < spec.upper[i];
                let mut trial = x.clone();
                trial[i] = t;
                if objective(&trial) <= objective(&x) {
                    x = trial;
                }
                if at_edge {
                    half[i] *= 2.0;
                    continue;
                }
                break;
            }
        }
        // Pattern move along the sweep displacement.
        let dir: Vec<f64> = x.iter().zip(&start).map(|(a, b)| a - b).collect();
        let size = dir.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        if size > 0.0 {
            let mut tmax = 8.0f64;
            for i in 0..dims {
                if dir[i] > 0.0 {
                    tmax = tmax.min((spec.upper[i] - x[i]) / dir[i]);
                } else if dir[i] < 0.0 {
                    tmax = tmax.min((spec.lower[i] - x[i]) / dir[i]);
                }
            }
            if tmax > 0.0 {
                let base = x.clone();
                let along = |t: f64| -> Vec<f64> {
                    base.iter().zip(&dir).map(|(a, d)| a + t * d).collect()
                };
                let t = golden_section(0.0, tmax, &mut |t| objective(&along(t)));
                let trial = along(t);
                if objective(&trial) < objective(&x) {
                    x = trial;
                }
            }
        }
        for i in 0..dims {
            half[i] = (4.0 * (x[i] - start[i]).abs())
                .max(1e-9 * (spec.upper[i] - spec.lower[i]))
                .min(spec.upper[i] - spec.lower[i]);
        }
        if size <= 1e-14 * (1.0 + x.iter().fold(0.0f64, |m, v| m.max(v.abs()))) {
            break;
        }
    }
    Ok(x)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::fixtures::p3;

    #[test]
    fn config_validation() {
        let mut cfg = SolverConfig::new(2.0);
        assert!(cfg.validate().is_ok());
        cfg.eps_schedule = vec![1e-2, 1e-1, 1e-9];
        assert!(cfg.validate().is_err());
        cfg.eps_schedule = vec![1e-2, 1e-4];
        assert!(cfg.validate().is_err());
        assert!(SolverConfig::new(1.0).validate().is_err());
    }

    #[test]
    fn constant_dirichlet_data() {
        let g = p3();
        let r = solve_dirichlet(
            &BoundaryFunction(vec![2.5, 2.5]),
            &g,
            &SolverConfig::new(3.0),
        )
        .unwrap();
        assert_eq!(r.energy, 0.0);
        assert!(r.u.0.iter().all(|&v| v == 2.5));
    }

    #[test]
    fn p3_dirichlet_midpoint() {
        let g = p3();
        for p in [1.5, 2.0, 3.0, 4.5] {
            let r = solve_dirichlet(&BoundaryFunction(vec![0.0, 1.0]), &g, &SolverConfig::new(p))
                .unwrap();
            assert!((r.u.0[1] - 0.5).abs() < 1e-12, "p = {p}");
            assert!(el_residual(&r.u, &g, p, ElMode::Dirichlet) <= 1e-10);
        }
    }

    #[test]
    fn p3_neumann_closed_form() {
        let g = p3();
        let l = BoundaryFunctional::new(vec![-0.5, 0.5]).unwrap();
        let r = solve_neumann(&l, &g, &SolverConfig::new(2.0)).unwrap();
        for (a, b) in r.u.0.iter().zip([-0.5, 0.0, 0.5]) {
            assert!((a - b).abs() < 1e-14);
        }
        assert!(el_residual(&r.u, &g, 2.0, ElMode::Neumann(&l)) <= 1e-10);
        assert!((r.objective + 0.25).abs() < 1e-14);
    }

    #[test]
    fn zero_functional_gives_zero_solution() {
        let g = p3();
        let r = solve_neumann(&BoundaryFunctional::zero(2), &g, &SolverConfig::new(3.0)).unwrap();
        assert_eq!(r.u.0, vec![0.0; 3]);
        assert_eq!(r.objective, 0.0);
        let c = VertexFunction::constant(3, 1.0);
        assert_eq!(
            el_residual(&c, &g, 3.0, ElMode::Neumann(&BoundaryFunctional::zero(2))),
            0.0
        );
    }

    #[test]
    fn residual_grows_with_perturbation() {
        let g = p3();
        let base = VertexFunction(vec![0.0, 0.5, 1.0]);
        let mut last = 0.0;
        for k in 1..6 {
            let delta = 1e-3 * k as f64;
            let mut u = base.clone();
            u.0[1] += delta;
            let r = el_residual(&u, &g, 2.0, ElMode::Dirichlet);
            assert!(r > last);
            assert!((r - 2.0 * delta).abs() < 1e-12);
            last = r;
        }
    }

    #[test]
    fn p3_energy_bounds() {
        let g = p3();
        let l = BoundaryFunctional::new(vec![-0.5, 0.5]).unwrap();
        let r = solve_neumann(&l, &g, &SolverConfig::new(2.0)).unwrap();
        let report = energy_bound_checks(&r, &g, &l, 0.5f64.sqrt(), 1.0, 2.0);
        assert!(report.holds());
        assert!((report.alpha_lower_bound + 0.25).abs() < 1e-15);
        let zero = energy_bound_checks(&r, &g, &BoundaryFunctional::zero(2), 0.0, 1.0, 2.0);
        assert!(zero.skipped);
    }

    #[test]
    fn brute_force_recovers_quadratic() {
        let f = |x: &[f64]| (x[0] - 0.3).powi(2) + 2.0 * (x[1] + 0.2).powi(2) + 0.5 * x[0] * x[1];
        let spec = BruteForceSpec {
            lower: vec![-1.0, -1.0],
            upper: vec![1.0, 1.0],
            grid_points: 21,
        };
        let x = brute_force_minimize(&f, &spec).unwrap();
        // Stationarity: 2(x-0.3) + 0.5y = 0, 4(y+0.2) + 0.5x = 0.
        let det = 2.0 * 4.0 - 0.25;
        let xs = (0.6 * 4.0 - 0.5 * -0.8) / det;
        let ys = (2.0 * -0.8 - 0.5 * 0.6) / det;
        assert!(
            (x[0] - xs).abs() < 1e-7 && (x[1] - ys).abs() < 1e-7,
            "{x:?}"
        );
        let too_many = BruteForceSpec {
            lower: vec![0.0; 7],
            upper: vec![1.0; 7],
            grid_points: 2,
        };
        assert!(matches!(
            brute_force_minimize(&f, &too_many),
            Err(Error::TooManyDimensions(7))
        ));
    }

    #[test]
    fn brute_force_on_p3_objectives() {
        let dir = |x: &[f64]| x[0].abs().powi(3) + (1.0 - x[0]).abs().powi(3);
        let spec = BruteForceSpec {
            lower: vec![-1.0],
            upper: vec![2.0],
            grid_points: 31,
        };
        let x = brute_force_minimize(&dir, &spec).unwrap();
        assert!((x[0] - 0.5).abs() < 1e-7);

        // Neumann objective at p = 2 with u_a pinned to 0: (u_b, u_c) free.
        let neu = |x: &[f64]| {
            let (a, b, c) = (0.0, x[0], x[1]);
            0.5 * ((b - a).powi(2) + (c - b).powi(2)) - (-0.5 * a + 0.5 * c)
        };
        let spec = BruteForceSpec {
            lower: vec![-3.0; 2],
            upper: vec![3.0; 2],
            grid_points: 25,
        };
        let x = brute_force_minimize(&neu, &spec).unwrap();
        // Centre on the interior mean (u_b).
        let u = [0.0 - x[0], x[0] - x[0], x[1] - x[0]];
        for (a, b) in u.iter().zip([-0.5, 0.0, 0.5]) {
            assert!((a - b).abs() < 1e-7, "{u:?}");
        }
    }
}
