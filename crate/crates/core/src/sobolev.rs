//! Discrete differential structure on a [`MetricMeasureGraph`].
//!
//! The gradient of `u` along an edge `e = (x -> y)` of length `lambda_e` is
//! `(u(y) - u(x)) / lambda_e`; the p-energy is `sum_e mu_e |grad_e u|^p` and the
//! pairing `sum_e mu_e |grad_e u|^{p-2} grad_e u grad_e v`. The p-Laplacian is
//! defined so that `pairing(u; v) = sum_z lap_p u(z) v(z)` holds identically.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::besov::{besov_energy, besov_kernel, BesovKernel, BoundaryFunction};
use crate::energy::{signed_power, PairEnergy, PairTerm};
use crate::error::{Error, Result};
use crate::graph::{BesovParams, MetricMeasureGraph};
use crate::linalg::pencil_on_constant_complement;
use crate::search::{
    multi_start, random_starts, AscentOptions, NormEstimate, RatioObjective, Scored,
};
use crate::solvers::SolverConfig;

/// Real values on every vertex, indexed like the graph.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VertexFunction(pub Vec<f64>);

impl VertexFunction {
    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn constant(n: usize, c: f64) -> Self {
        Self(vec![c; n])
    }

    pub fn scaled(&self, t: f64) -> Self {
        Self(self.0.iter().map(|v| v * t).collect())
    }

    pub fn axpy(&self, t: f64, other: &Self) -> Self {
        Self(
            self.0
                .iter()
                .zip(&other.0)
                .map(|(a, b)| a + t * b)
                .collect(),
        )
    }
}

/// Oriented edge gradients `(u(b) - u(a)) / length`, one per edge.
pub fn edge_gradient(u: &VertexFunction, graph: &MetricMeasureGraph) -> Vec<f64> {
    graph
        .edges()
        .iter()
        .map(|e| (u.0[e.b] - u.0[e.a]) / e.length)
        .collect()
}

pub fn p_energy(u: &VertexFunction, graph: &MetricMeasureGraph, p: f64) -> f64 {
    graph
        .edges()
        .iter()
        .map(|e| e.mu * ((u.0[e.b] - u.0[e.a]) / e.length).abs().powf(p))
        .sum()
}

/// `||grad u||_{L^p}`.
pub fn gradient_norm(u: &VertexFunction, graph: &MetricMeasureGraph, p: f64) -> f64 {
    p_energy(u, graph, p).powf(1.0 / p)
}

/// `sum_e mu_e |grad u|^{p-2} grad u * grad v`; linear in `v`.
pub fn pairing(u: &VertexFunction, v: &VertexFunction, graph: &MetricMeasureGraph, p: f64) -> f64 {
    graph
        .edges()
        .iter()
        .map(|e| {
            let gu = (u.0[e.b] - u.0[e.a]) / e.length;
            let gv = (v.0[e.b] - v.0[e.a]) / e.length;
            e.mu * signed_power(gu, p) * gv
        })
        .sum()
}

pub fn p_laplacian(u: &VertexFunction, graph: &MetricMeasureGraph, p: f64) -> VertexFunction {
    let mut out = vec![0.0; graph.num_vertices()];
    for e in graph.edges() {
        let flux = e.mu / e.length * signed_power((u.0[e.b] - u.0[e.a]) / e.length, p);
        out[e.b] += flux;
        out[e.a] -= flux;
    }
    VertexFunction(out)
}

pub fn trace(u: &VertexFunction, graph: &MetricMeasureGraph) -> BoundaryFunction {
    BoundaryFunction(graph.boundary().iter().map(|&z| u.0[z]).collect())
}

/// `mu`-weighted mean over interior vertices.
pub fn mu_mean(u: &VertexFunction, graph: &MetricMeasureGraph) -> f64 {
    let (num, den) = graph.interior().iter().fold((0.0, 0.0), |(n, d), &x| {
        (n + graph.mu(x) * u.0[x], d + graph.mu(x))
    });
    num / den
}

/// Representative of the class of `u` modulo constants with zero interior mean.
pub fn mu_mean_zero(u: &VertexFunction, graph: &MetricMeasureGraph) -> VertexFunction {
    let m = mu_mean(u, graph);
    VertexFunction(u.0.iter().map(|v| v - m).collect())
}

/// The p-energy as a [`PairEnergy`] over edges.
pub fn graph_energy(graph: &MetricMeasureGraph, p: f64) -> PairEnergy {
    PairEnergy {
        n: graph.num_vertices(),
        p,
        terms: graph
            .edges()
            .iter()
            .map(|e| PairTerm {
                a: e.a,
                b: e.b,
                coef: e.mu,
                scale: e.length,
            })
            .collect(),
    }
}

/// Matrix of the 2-energy: `u^T K u = p_energy(u, 2)` and `K u = lap_2 u`.
pub fn stiffness(graph: &MetricMeasureGraph) -> DMatrix<f64> {
    crate::linalg::laplacian(
        graph.num_vertices(),
        graph
            .edges()
            .iter()
            .map(|e| (e.a, e.b, e.mu / (e.length * e.length))),
    )
}

/// The 2-harmonic extension operator and its Schur complement.
///
/// Used as the linear extension `E` for every `p`.
pub struct HarmonicExtension {
    n: usize,
    boundary: Vec<usize>,
    interior: Vec<usize>,
    /// Interior values per unit boundary datum: `u_I = -K_II^{-1} K_IB g`.
    lift: DMatrix<f64>,
    schur: DMatrix<f64>,
}

impl HarmonicExtension {
    pub fn new(graph: &MetricMeasureGraph) -> Result<Self> {
        let k = stiffness(graph);
        let b = graph.boundary().to_vec();
        let i = graph.interior().to_vec();
        let kii = k.select_rows(&i).select_columns(&i);
        let kib = k.select_rows(&i).select_columns(&b);
        let kbb = k.select_rows(&b).select_columns(&b);
        let lift = -kii
            .lu()
            .solve(&kib)
            .ok_or_else(|| Error::Numerical("interior stiffness is singular".into()))?;
        let schur = &kbb + kib.transpose() * &lift;
        let schur = (&schur + schur.transpose()) * 0.5;
        Ok(Self {
            n: graph.num_vertices(),
            boundary: b,
            interior: i,
            lift,
            schur,
        })
    }

    pub fn extend(&self, g: &BoundaryFunction) -> VertexFunction {
        let mut u = vec![0.0; self.n];
        for (k, &z) in self.boundary.iter().enumerate() {
            u[z] = g.0[k];
        }
        let ui = &self.lift * DVector::from_column_slice(&g.0);
        for (k, &x) in self.interior.iter().enumerate() {
            u[x] = ui[k];
        }
        VertexFunction(u)
    }

    /// `n x m` matrix of the extension.
    pub fn matrix(&self) -> DMatrix<f64> {
        let m = self.boundary.len();
        let mut e = DMatrix::zeros(self.n, m);
        for (k, &z) in self.boundary.iter().enumerate() {
            e[(z, k)] = 1.0;
        }
        for (r, &x) in self.interior.iter().enumerate() {
            for k in 0..m {
                e[(x, k)] = self.lift[(r, k)];
            }
        }
        e
    }

    /// Boundary form `S` with `g^T S g = p_energy(E g, 2)`; at `p = 2` this is
    /// the Dirichlet-to-Neumann matrix.
    pub fn schur(&self) -> &DMatrix<f64> {
        &self.schur
    }
}

pub fn extend_linear(g: &BoundaryFunction, graph: &MetricMeasureGraph) -> Result<VertexFunction> {
    if g.len() != graph.num_boundary() {
        return Err(Error::DimensionMismatch {
            expected: graph.num_boundary(),
            got: g.len(),
        });
    }
    Ok(HarmonicExtension::new(graph)?.extend(g))
}

/// `inf ||u||_{L^p(mu)} + ||grad u||_{L^p}` over `0 <= u <= 1` with `u = 1` on `set`.
///
/// Projected gradient with Barzilai-Borwein steps on a smoothed objective,
/// followed by evaluation of the exact objective at the final iterate.
pub fn capacity_p(
    set: &[usize],
    graph: &MetricMeasureGraph,
    p: f64,
    cfg: &SolverConfig,
) -> Result<f64> {
    if set.is_empty() {
        return Err(Error::EmptySet);
    }
    let n = graph.num_vertices();
    if let Some(&bad) = set.iter().find(|&&x| x >= n) {
        return Err(Error::InvalidParameter(format!(
            "vertex index {bad} out of range"
        )));
    }
    let mut fixed = vec![false; n];
    set.iter().for_each(|&x| fixed[x] = true);
    let mu = graph.interior_weights();
    let energy = graph_energy(graph, p);

    let exact = |u: &[f64]| -> f64 {
        let lp: f64 = u.iter().zip(&mu).map(|(v, m)| m * v.abs().powf(p)).sum();
        lp.powf(1.0 / p) + energy.value(u).powf(1.0 / p)
    };
    let smoothed = |u: &[f64], eps: f64, grad: Option<&mut [f64]>| -> f64 {
        let e2 = eps * eps;
        let lp: f64 = u
            .iter()
            .zip(&mu)
            .map(|(v, m)| m * (v * v + e2).powf(p / 2.0))
            .sum();
        let mut en = 0.0;
        for t in &energy.terms {
            let g = (u[t.b] - u[t.a]) / t.scale;
            en += t.coef * (g * g + e2).powf(p / 2.0);
        }
        let a = lp.powf(1.0 / p);
        let b = en.powf(1.0 / p);
        if let Some(out) = grad {
            let ca = if a > 0.0 { a.powf(1.0 - p) } else { 0.0 };
            let cb = if b > 0.0 { b.powf(1.0 - p) } else { 0.0 };
            for (x, o) in out.iter_mut().enumerate() {
                let v = u[x];
                *o = ca * mu[x] * (v * v + e2).powf(p / 2.0 - 1.0) * v;
            }
            for t in &energy.terms {
                let g = (u[t.b] - u[t.a]) / t.scale;
                let q = cb * t.coef / t.scale * (g * g + e2).powf(p / 2.0 - 1.0) * g;
                out[t.b] += q;
                out[t.a] -= q;
            }
            for (x, o) in out.iter_mut().enumerate() {
                if fixed[x] {
                    *o = 0.0;
                }
            }
        }
        a + b
    };
    let project = |u: &mut [f64]| {
        for (x, v) in u.iter_mut().enumerate() {
            *v = if fixed[x] { 1.0 } else { v.clamp(0.0, 1.0) };
        }
    };

    let mut u: Vec<f64> = (0..n).map(|x| if fixed[x] { 1.0 } else { 0.5 }).collect();
    let mut best = exact(&u);
    let mut grad = vec![0.0; n];
    let mut next_grad = vec![0.0; n];
    for eps in [1e-2, 1e-4, 1e-6, 1e-8] {
        let mut f = smoothed(&u, eps, Some(&mut grad));
        let mut step = 1.0;
        for _ in 0..cfg.max_iter.max(1) * 20 {
            let mut accepted = None;
            for _ in 0..60 {
                let mut trial: Vec<f64> = u.iter().zip(&grad).map(|(v, g)| v - step * g).collect();
                project(&mut trial);
                let d2: f64 = trial.iter().zip(&u).map(|(a, b)| (a - b) * (a - b)).sum();
                let ft = smoothed(&trial, eps, Some(&mut next_grad));
                if ft <= f - 1e-4 / step * d2 || d2 == 0.0 {
                    accepted = Some((trial, ft, d2));
                    break;
                }
                step *= 0.5;
            }
            let Some((trial, ft, d2)) = accepted else {
                break;
            };
            let s: Vec<f64> = trial.iter().zip(&u).map(|(a, b)| a - b).collect();
            let y: Vec<f64> = next_grad.iter().zip(&grad).map(|(a, b)| a - b).collect();
            let sy: f64 = s.iter().zip(&y).map(|(a, b)| a * b).sum();
            u = trial;
            std::mem::swap(&mut grad, &mut next_grad);
            let improvement = f - ft;
            f = ft;
            step = if sy > 0.0 { d2 / sy } else { step * 2.0 };
            if d2.sqrt() <= cfg.grad_tol.max(1e-14) || improvement <= 1e-16 * f.abs() {
                break;
            }
        }
        best = best.min(exact(&u));
    }
    Ok(best)
}

fn pnorm_ratio_estimate(exact: Scored, search: Scored, restarts: usize, p: f64) -> NormEstimate {
    match exact {
        Some((value, witness)) => NormEstimate {
            value,
            witness,
            certified: true,
            restarts: 0,
        },
        None => {
            let (log_value, witness) = search.unwrap_or((f64::NEG_INFINITY, Vec::new()));
            NormEstimate {
                value: (log_value / p).exp(),
                witness,
                certified: false,
                restarts,
            }
        }
    }
}

/// How a norm estimate should be produced.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NormMethod {
    /// Generalized eigenproblem at `p = 2`, multi-start search otherwise.
    #[default]
    Auto,
    Eigen,
    Search,
}

impl NormMethod {
    pub(crate) fn use_eigen(self, p: f64) -> Result<bool> {
        match self {
            NormMethod::Auto => Ok(p == 2.0),
            NormMethod::Eigen if p == 2.0 => Ok(true),
            NormMethod::Eigen => Err(Error::InvalidParameter(
                "eigen-based norms need p = 2".into(),
            )),
            NormMethod::Search => Ok(false),
        }
    }
}

/// `p * log` of `||Tr u||_B / ||grad u||_p` over vertex functions.
struct TraceRatio<'a> {
    graph: &'a MetricMeasureGraph,
    grad_energy: PairEnergy,
    boundary_energy: PairEnergy,
}

impl RatioObjective for TraceRatio<'_> {
    type Workspace = ();

    fn dim(&self) -> usize {
        self.graph.num_vertices()
    }

    fn workspace(&self) {}

    fn eval(&self, u: &[f64], _: &mut ()) -> Result<Scored> {
        let f: Vec<f64> = self.graph.boundary().iter().map(|&z| u[z]).collect();
        let num = self.boundary_energy.value(&f);
        let den = self.grad_energy.value(u);
        if !(num > 0.0 && den > 0.0) {
            return Ok(None);
        }
        let p = self.grad_energy.p;
        let mut fb = vec![0.0; f.len()];
        self.boundary_energy.flux(&f, &mut fb);
        let mut fe = vec![0.0; u.len()];
        self.grad_energy.flux(u, &mut fe);
        let mut g: Vec<f64> = fe.iter().map(|v| -p * v / den).collect();
        for (k, &z) in self.graph.boundary().iter().enumerate() {
            g[z] += p * fb[k] / num;
        }
        Ok(Some((num.ln() - den.ln(), g)))
    }
}

/// `sup ||Tr u||_B / ||grad u||_p` over nonconstant `u`.
pub fn trace_norm(
    graph: &MetricMeasureGraph,
    params: BesovParams,
    method: NormMethod,
    cfg: &SolverConfig,
) -> Result<NormEstimate> {
    let kernel = besov_kernel(graph, params);
    let ext = HarmonicExtension::new(graph)?;
    let p = params.p;
    // Quadratic surrogate: sup g^T Q g / g^T S g, with the minimal-energy lift of g.
    let (vals, vecs) = pencil_on_constant_complement(&kernel.quadratic_form(), ext.schur())?;
    let top = ext.extend(&BoundaryFunction(
        vecs.column(vals.len() - 1).iter().copied().collect(),
    ));
    if method.use_eigen(p)? {
        let value = vals[vals.len() - 1].sqrt();
        return Ok(pnorm_ratio_estimate(Some((value, top.0)), None, 0, p));
    }
    let obj = TraceRatio {
        graph,
        grad_energy: graph_energy(graph, p),
        boundary_energy: kernel.pair_energy(),
    };
    let mut starts = vec![top.0];
    starts.extend(random_starts(graph.num_vertices(), cfg.restarts, cfg.seed));
    let found = multi_start(&obj, &starts, AscentOptions::default())?;
    Ok(pnorm_ratio_estimate(None, found, starts.len(), p))
}

/// `p * log` of `||grad E g||_p / ||g||_B` over boundary functions.
struct ExtensionRatio {
    lift: DMatrix<f64>,
    grad_energy: PairEnergy,
    boundary_energy: PairEnergy,
}

impl RatioObjective for ExtensionRatio {
    type Workspace = ();

    fn dim(&self) -> usize {
        self.lift.ncols()
    }

    fn workspace(&self) {}

    fn eval(&self, g: &[f64], _: &mut ()) -> Result<Scored> {
        let u = &self.lift * DVector::from_column_slice(g);
        let num = self.grad_energy.value(u.as_slice());
        let den = self.boundary_energy.value(g);
        if !(num > 0.0 && den > 0.0) {
            return Ok(None);
        }
        let p = self.grad_energy.p;
        let mut fe = vec![0.0; u.len()];
        self.grad_energy.flux(u.as_slice(), &mut fe);
        let pulled = self.lift.transpose() * DVector::from_vec(fe);
        let mut fb = vec![0.0; g.len()];
        self.boundary_energy.flux(g, &mut fb);
        let grad = pulled
            .iter()
            .zip(&fb)
            .map(|(a, b)| p * a / num - p * b / den)
            .collect();
        Ok(Some((num.ln() - den.ln(), grad)))
    }
}

/// `sup ||grad E g||_p / ||g||_B` over nonconstant boundary `g`, with `E` the
/// 2-harmonic extension.
pub fn extension_norm(
    graph: &MetricMeasureGraph,
    params: BesovParams,
    method: NormMethod,
    cfg: &SolverConfig,
) -> Result<NormEstimate> {
    let kernel = besov_kernel(graph, params);
    let ext = HarmonicExtension::new(graph)?;
    let p = params.p;
    let (vals, vecs) = pencil_on_constant_complement(ext.schur(), &kernel.quadratic_form())?;
    let top: Vec<f64> = vecs.column(vals.len() - 1).iter().copied().collect();
    if method.use_eigen(p)? {
        return Ok(pnorm_ratio_estimate(
            Some((vals[vals.len() - 1].sqrt(), top)),
            None,
            0,
            p,
        ));
    }
    let obj = ExtensionRatio {
        lift: ext.matrix(),
        grad_energy: graph_energy(graph, p),
        boundary_energy: kernel.pair_energy(),
    };
    let mut starts = vec![top];
    starts.extend(random_starts(graph.num_boundary(), cfg.restarts, cfg.seed));
    let found = multi_start(&obj, &starts, AscentOptions::default())?;
    Ok(pnorm_ratio_estimate(None, found, starts.len(), p))
}

/// `||Tr u||_B / ||grad u||_p` for one witness, or `None` if `u` is constant.
pub fn trace_ratio(
    u: &VertexFunction,
    graph: &MetricMeasureGraph,
    kernel: &BesovKernel,
) -> Option<f64> {
    let p = kernel.p();
    let den = p_energy(u, graph, p);
    (den > 0.0).then(|| (besov_energy(&trace(u, graph), kernel) / den).powf(1.0 / p))
}

/// `||grad E g||_p / ||g||_B` for one witness, or `None` if `g` is constant.
pub fn extension_ratio(
    g: &BoundaryFunction,
    graph: &MetricMeasureGraph,
    ext: &HarmonicExtension,
    kernel: &BesovKernel,
) -> Option<f64> {
    let p = kernel.p();
    let den = besov_energy(g, kernel);
    (den > 0.0).then(|| (p_energy(&ext.extend(g), graph, p) / den).powf(1.0 / p))
}
